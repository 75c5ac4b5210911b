// SPDX-License-Identifier: Apache-2.0

//! Adaptive Dormand–Prince 5(4) integrator for real state vectors.
//!
//! Complex systems (density matrices, amplitudes) are flattened into
//! interleaved real/imaginary parts by their callers. The integrator steps
//! exactly onto every requested output time, so no dense-output
//! interpolation is involved.

use crate::error::{Error, Result};

/// Absolute/relative error tolerances for one step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub atol: f64,
    pub rtol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            atol: 1e-10,
            rtol: 1e-8,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Rk45 {
    pub tol: Tolerances,
    pub max_steps: usize,
    pub min_step: f64,
}

impl Default for Rk45 {
    fn default() -> Self {
        Rk45 {
            tol: Tolerances::default(),
            max_steps: 2_000_000,
            min_step: 1e-14,
        }
    }
}

// Dormand–Prince tableau.
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// Difference between the 5th and embedded 4th order weights.
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

/// Checks that a time grid is nonempty, finite and non-decreasing.
pub fn validate_grid(name: &'static str, grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::EmptyGrid(name));
    }
    if grid.iter().any(|t| !t.is_finite()) {
        return Err(Error::invalid(name, "grid contains non-finite values"));
    }
    if grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::invalid(name, "grid must be sorted ascending"));
    }
    Ok(())
}

impl Rk45 {
    pub fn with_tolerances(atol: f64, rtol: f64) -> Self {
        Rk45 {
            tol: Tolerances { atol, rtol },
            ..Default::default()
        }
    }

    /// Integrates `dy/dt = f(t, y)` from `t_grid[0]` and returns the state at
    /// every grid time (the first entry is `y0` itself).
    pub fn integrate<F>(&self, mut f: F, y0: &[f64], t_grid: &[f64]) -> Result<Vec<Vec<f64>>>
    where
        F: FnMut(f64, &[f64], &mut [f64]),
    {
        validate_grid("t_grid", t_grid)?;
        let n = y0.len();
        let mut out = Vec::with_capacity(t_grid.len());
        let mut y = y0.to_vec();
        out.push(y.clone());

        let mut k1 = vec![0.0; n];
        let mut k2 = vec![0.0; n];
        let mut k3 = vec![0.0; n];
        let mut k4 = vec![0.0; n];
        let mut k5 = vec![0.0; n];
        let mut k6 = vec![0.0; n];
        let mut k7 = vec![0.0; n];
        let mut tmp = vec![0.0; n];
        let mut y_new = vec![0.0; n];

        let mut t = t_grid[0];
        f(t, &y, &mut k1);
        let mut h = self.initial_step(t_grid, &y, &k1);
        let mut steps = 0usize;

        for &t_out in &t_grid[1..] {
            while t < t_out {
                if steps >= self.max_steps {
                    return Err(Error::Integrator {
                        t,
                        h,
                        steps,
                        reason: "maximum step count exceeded".into(),
                    });
                }
                let remaining = t_out - t;
                let last = h >= remaining;
                let h_try = if last { remaining } else { h };

                for i in 0..n {
                    tmp[i] = y[i] + h_try * A21 * k1[i];
                }
                f(t + C2 * h_try, &tmp, &mut k2);
                for i in 0..n {
                    tmp[i] = y[i] + h_try * (A31 * k1[i] + A32 * k2[i]);
                }
                f(t + C3 * h_try, &tmp, &mut k3);
                for i in 0..n {
                    tmp[i] = y[i] + h_try * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
                }
                f(t + C4 * h_try, &tmp, &mut k4);
                for i in 0..n {
                    tmp[i] = y[i] + h_try * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
                }
                f(t + C5 * h_try, &tmp, &mut k5);
                for i in 0..n {
                    tmp[i] = y[i]
                        + h_try
                            * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
                }
                f(t + h_try, &tmp, &mut k6);
                for i in 0..n {
                    y_new[i] = y[i]
                        + h_try * (B1 * k1[i] + B3 * k3[i] + B4 * k4[i] + B5 * k5[i] + B6 * k6[i]);
                }
                f(t + h_try, &y_new, &mut k7);

                let mut err_sq = 0.0;
                for i in 0..n {
                    let e = h_try
                        * (E1 * k1[i]
                            + E3 * k3[i]
                            + E4 * k4[i]
                            + E5 * k5[i]
                            + E6 * k6[i]
                            + E7 * k7[i]);
                    let scale = self.tol.atol + self.tol.rtol * y[i].abs().max(y_new[i].abs());
                    let r = e / scale;
                    err_sq += r * r;
                }
                let err = if n == 0 {
                    0.0
                } else {
                    (err_sq / n as f64).sqrt()
                };
                if !err.is_finite() {
                    return Err(Error::Integrator {
                        t,
                        h: h_try,
                        steps,
                        reason: "non-finite error estimate".into(),
                    });
                }
                steps += 1;

                if err <= 1.0 {
                    t = if last { t_out } else { t + h_try };
                    std::mem::swap(&mut y, &mut y_new);
                    std::mem::swap(&mut k1, &mut k7);
                    let factor = if err == 0.0 {
                        5.0
                    } else {
                        (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
                    };
                    // A truncated final step says nothing about the natural step size.
                    if !last || factor < 1.0 {
                        h = h_try * factor;
                    }
                } else {
                    h = h_try * (0.9 * err.powf(-0.2)).clamp(0.1, 1.0);
                    if h < self.min_step * t.abs().max(1.0) {
                        return Err(Error::Integrator {
                            t,
                            h,
                            steps,
                            reason: format!("step size underflow (error ratio {err:.3e})"),
                        });
                    }
                }
            }
            out.push(y.clone());
        }
        Ok(out)
    }

    fn initial_step(&self, t_grid: &[f64], y: &[f64], dy: &[f64]) -> f64 {
        let span = t_grid[t_grid.len() - 1] - t_grid[0];
        let mut d0 = 0.0f64;
        let mut d1 = 0.0f64;
        for (yi, di) in y.iter().zip(dy) {
            let s = self.tol.atol + self.tol.rtol * yi.abs();
            d0 = d0.max(yi.abs() / s);
            d1 = d1.max(di.abs() / s);
        }
        let h = if d0 < 1e-5 || d1 < 1e-5 {
            1e-6
        } else {
            0.01 * d0 / d1
        };
        if span > 0.0 {
            h.min(span).max(1e-12 * span)
        } else {
            h
        }
    }
}
