// SPDX-License-Identifier: Apache-2.0

//! Linearized cavity model: a collective spin excitation `S1` and a dark
//! polariton `P_D` coupled by pair creation at rate `xi`.
//!
//! The complex equations are
//!
//! ```text
//! dS1†/dt = (g1²/g2² gL - gL - g0 - i d1) S1† + xi P_D  + F
//! dP_D/dt = -(k/eta + gL + i d2) P_D          + xi S1† + F
//! ```
//!
//! and are evolved as a 4x4 symmetric-ordered quadrature covariance over
//! `(X1, Y1, XD, YD)` with `X = (b + b†)/√2`, `Y = i(b† - b)/√2`, where `b`
//! is `S1` or `P_D`. In this basis `Y+ = (Y1 + YD)/√2` and
//! `X- = (X1 - XD)/√2` are the squeezed quadratures.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dicke::{hermitian_eigen, CMatrix};
use crate::error::{Error, Result};
use crate::ode::{validate_grid, Rk45};
use crate::twist::parabola_vertex;

pub type RMatrix = DMatrix<f64>;

const X1: usize = 0;
const Y1: usize = 1;
const XD: usize = 2;
const YD: usize = 3;

const SYMMETRY_TOL: f64 = 1e-12;
const SYMPLECTIC_TOL: f64 = 1e-8;
/// Runs stop once `total_excitations` exceeds this fraction of `N`.
pub const LINEARIZATION_FRACTION: f64 = 0.1;

/// Physical inputs. All rates share one unit (the CLI uses units of `gamma`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CavityParams {
    pub g1: f64,
    pub g2: f64,
    pub omega1: f64,
    pub omega2: f64,
    pub delta: f64,
    #[serde(default)]
    pub delta1: f64,
    #[serde(default)]
    pub delta2: f64,
    pub gamma: f64,
    pub gamma_br1: f64,
    pub gamma_br2: f64,
    #[serde(default)]
    pub gamma0: f64,
    pub kappa_cav: f64,
    pub n_atoms: f64,
}

impl CavityParams {
    /// `g1 = g2 = g`, `Omega1 = Omega2 = 1`, `gamma = kappa = 1`, equal
    /// branching, `N = cooperativity / g²` and `Delta` at its closed-form
    /// optimum. `cooperativity` is `g² N / (gamma kappa)`.
    pub fn symmetric(cooperativity: f64, g: f64) -> Result<Self> {
        if !(cooperativity.is_finite() && cooperativity > 0.0) {
            return Err(Error::invalid("cooperativity", "must be finite and > 0"));
        }
        let mut p = CavityParams {
            g1: g,
            g2: g,
            omega1: 1.0,
            omega2: 1.0,
            delta: 0.0,
            delta1: 0.0,
            delta2: 0.0,
            gamma: 1.0,
            gamma_br1: 1.0,
            gamma_br2: 1.0,
            gamma0: 0.0,
            kappa_cav: 1.0,
            n_atoms: cooperativity / (g * g),
        };
        p.delta = closed_form_delta_opt(&p);
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("g1", self.g1),
            ("g2", self.g2),
            ("omega1", self.omega1),
            ("omega2", self.omega2),
            ("delta", self.delta),
            ("gamma", self.gamma),
            ("gamma_br1", self.gamma_br1),
            ("gamma_br2", self.gamma_br2),
            ("gamma0", self.gamma0),
            ("kappa_cav", self.kappa_cav),
            ("n_atoms", self.n_atoms),
        ];
        for (name, v) in fields {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::invalid(name, "must be finite and >= 0"));
            }
        }
        for (name, v) in [("delta1", self.delta1), ("delta2", self.delta2)] {
            if !v.is_finite() {
                return Err(Error::invalid(name, "must be finite"));
            }
        }
        if self.gamma <= 0.0 {
            return Err(Error::invalid("gamma", "must be > 0"));
        }
        if self.n_atoms < 1.0 {
            return Err(Error::invalid("n_atoms", "must be >= 1"));
        }
        if self.omega2 == 0.0 {
            return Err(Error::invalid("omega2", "must be nonzero"));
        }
        if self.delta < 10.0 * self.gamma {
            return Err(Error::invalid(
                "delta",
                "need delta >= 10 gamma (far detuned)",
            ));
        }
        if (self.gamma_br1 + self.gamma_br2 - 2.0 * self.gamma).abs() > 1e-9 * self.gamma.max(1.0) {
            return Err(Error::invalid(
                "gamma_br1",
                "branching rates must sum to 2 gamma",
            ));
        }
        Ok(())
    }

    /// Soft warnings about regimes where the model is less reliable.
    pub fn warnings(&self) -> Vec<String> {
        let mut w = Vec::new();
        if self.delta < 30.0 * self.gamma {
            w.push(format!(
                "delta = {} is below 30 gamma; adiabatic elimination is marginal",
                self.delta
            ));
        }
        if self.gamma0 > 0.0 {
            w.push("gamma0 > 0 is added to the spin loss; this path is not validated".into());
        }
        if (self.g1 - self.g2).abs() > 1e-12 * self.g1.max(self.g2) {
            w.push("g1 != g2: closed-form expressions assume equal couplings".into());
        }
        w
    }

    /// `g1² N / (gamma kappa)`.
    pub fn cooperativity(&self) -> f64 {
        self.g1 * self.g1 * self.n_atoms / (self.gamma * self.kappa_cav)
    }
}

/// Rates obtained after adiabatic elimination.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedRates {
    pub xi: f64,
    pub eta: f64,
    pub gamma_l: f64,
    /// Light shift; reported only.
    pub delta_l: f64,
    pub chi_raman: f64,
}

pub fn derive_rates(p: &CavityParams) -> Result<DerivedRates> {
    p.validate()?;
    let sqrt_n = p.n_atoms.sqrt();
    let g2n = p.g2 * p.g2 * p.n_atoms;
    let o2 = p.omega2 * p.omega2;
    Ok(DerivedRates {
        xi: p.omega1 * p.omega2 / p.delta * p.g1 * sqrt_n / (g2n + o2).sqrt(),
        eta: g2n / o2,
        gamma_l: p.gamma * p.omega1 * p.omega1 / (p.delta * p.delta),
        delta_l: p.omega1 * p.omega1 / p.delta,
        chi_raman: p.g1 * sqrt_n * p.omega1 / p.delta,
    })
}

/// Polariton loss `kappa / eta`.
fn polariton_loss(p: &CavityParams, r: &DerivedRates) -> f64 {
    p.kappa_cav / r.eta
}

/// Drift `A` and diffusion `D` of `dC/dt = A C + C Aᵀ + D`.
///
/// The spin diffusion is `½(<F F†> + <F† F>) = gL (g_br1 + g_br2)/gamma`,
/// plus `gamma0` to keep the vacuum stationary under pure dephasing loss.
/// The cavity part of the polariton diffusion is `kappa/eta`, the value that
/// keeps the vacuum stationary under a damping `kappa/eta`.
pub fn drift_diffusion(p: &CavityParams, r: &DerivedRates) -> (RMatrix, RMatrix) {
    let gain = (p.g1 * p.g1 / (p.g2 * p.g2)) * r.gamma_l - r.gamma_l - p.gamma0;
    let loss = polariton_loss(p, r) + r.gamma_l;
    let xi = r.xi;
    let (d1, d2) = (p.delta1, p.delta2);
    #[rustfmt::skip]
    let a = RMatrix::from_row_slice(4, 4, &[
        gain, -d1,   xi,    0.0,
        d1,   gain,  0.0,  -xi,
        xi,   0.0,  -loss,  d2,
        0.0, -xi,   -d2,  -loss,
    ]);
    let atomic = r.gamma_l * (p.gamma_br1 + p.gamma_br2) / p.gamma;
    let spin = atomic + p.gamma0;
    let pol = polariton_loss(p, r) + atomic;
    let d = RMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![spin, spin, pol, pol]));
    (a, d)
}

fn pack(c: &RMatrix) -> Vec<f64> {
    c.as_slice().to_vec()
}

/// Symmetric part of a matrix stored column-major in `y`.
fn unpack(n: usize, y: &[f64]) -> RMatrix {
    let c = RMatrix::from_column_slice(n, n, y);
    (&c + c.transpose()) * 0.5
}

/// Standard symplectic form for `n/2` modes ordered `(X, Y)` per mode.
fn symplectic(n: usize) -> RMatrix {
    let mut o = RMatrix::zeros(n, n);
    for k in (0..n).step_by(2) {
        o[(k, k + 1)] = 1.0;
        o[(k + 1, k)] = -1.0;
    }
    o
}

/// Smallest eigenvalue of `C + (i/2) Omega`.
pub fn symplectic_min_eigenvalue(c: &RMatrix) -> f64 {
    let n = c.nrows();
    let o = symplectic(n);
    let h = CMatrix::from_fn(n, n, |i, j| Complex64::new(c[(i, j)], 0.5 * o[(i, j)]));
    hermitian_eigen(&h).0[0]
}

/// Symmetry and symplectic positivity of a covariance matrix.
pub fn check_covariance(c: &RMatrix, t: f64) -> Result<()> {
    let asym = (c - c.transpose()).amax();
    if asym > SYMMETRY_TOL * c.amax().max(1.0) {
        return Err(Error::Physicality {
            t,
            reason: format!("covariance asymmetry {asym:e}"),
        });
    }
    let min = symplectic_min_eigenvalue(c);
    if min < -SYMPLECTIC_TOL {
        return Err(Error::Physicality {
            t,
            reason: format!("C + iΩ/2 has eigenvalue {min:e}"),
        });
    }
    Ok(())
}

/// Vacuum covariance `½ I`.
pub fn vacuum(n: usize) -> RMatrix {
    RMatrix::identity(n, n) * 0.5
}

/// Integrates `dC/dt = A C + C Aᵀ + D`; every output is checked for
/// physicality.
pub fn evolve_covariance(
    a: &RMatrix,
    d: &RMatrix,
    c0: &RMatrix,
    t_grid: &[f64],
) -> Result<Vec<RMatrix>> {
    let n = a.nrows();
    if a.ncols() != n || d.shape() != (n, n) || c0.shape() != (n, n) || !n.is_multiple_of(2) {
        return Err(Error::invalid(
            "A",
            "A, D, C0 must be square of equal even size",
        ));
    }
    validate_grid("t_grid", t_grid)?;
    check_covariance(c0, t_grid[0])?;
    let ys = Rk45::default().integrate(
        |_, y, dy| {
            let c = RMatrix::from_column_slice(n, n, y);
            let ac = a * &c;
            let rhs = &ac + ac.transpose() + d;
            dy.copy_from_slice(rhs.as_slice());
        },
        &pack(c0),
        t_grid,
    )?;
    let mut out = Vec::with_capacity(ys.len());
    for (&t, y) in t_grid.iter().zip(&ys) {
        let raw = RMatrix::from_column_slice(n, n, y);
        check_covariance(&raw, t)?;
        out.push(unpack(n, y));
    }
    Ok(out)
}

/// Variances of the sum and difference quadratures.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureStats {
    pub var_y_plus: f64,
    pub var_x_minus: f64,
    pub var_y_minus: f64,
    pub var_x_plus: f64,
    /// `<X+² + X-² + Y+² + Y-²>`, equal to 2 in the vacuum.
    pub total_excitations: f64,
}

pub fn quadrature_stats(c: &RMatrix) -> QuadratureStats {
    let var = |i: usize, j: usize, s: f64| 0.5 * (c[(i, i)] + c[(j, j)] + 2.0 * s * c[(i, j)]);
    QuadratureStats {
        var_y_plus: var(Y1, YD, 1.0),
        var_x_minus: var(X1, XD, -1.0),
        var_y_minus: var(Y1, YD, -1.0),
        var_x_plus: var(X1, XD, 1.0),
        total_excitations: c.trace(),
    }
}

/// One output time of a cavity run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CavityPoint {
    pub t: f64,
    pub stats: QuadratureStats,
}

/// Evolves the vacuum under the cavity model and stops with
/// [`Error::LinearizationBreakdown`] if the excitation count leaves the
/// linear regime.
pub fn simulate(p: &CavityParams, t_grid: &[f64]) -> Result<Vec<CavityPoint>> {
    let r = derive_rates(p)?;
    let (a, d) = drift_diffusion(p, &r);
    let cs = evolve_covariance(&a, &d, &vacuum(4), t_grid)?;
    let limit = LINEARIZATION_FRACTION * p.n_atoms;
    let mut out = Vec::with_capacity(cs.len());
    for (&t, c) in t_grid.iter().zip(&cs) {
        let stats = quadrature_stats(c);
        if stats.total_excitations > limit {
            return Err(Error::LinearizationBreakdown {
                t,
                excitations: stats.total_excitations,
                limit,
            });
        }
        out.push(CavityPoint { t, stats });
    }
    Ok(out)
}

/// A result with the caveats that apply to it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Estimate<T = f64> {
    pub value: T,
    pub warnings: Vec<String>,
}

/// `½ {exp(-2 xi t) + (3 gL + k/eta)/(2 xi) + ((gL + k/eta)/(2 xi))² exp(2 xi t)}`.
pub fn analytic_quadrature(r: &DerivedRates, p: &CavityParams, t: f64) -> Result<Estimate> {
    if r.xi.is_nan() || r.xi <= 0.0 {
        return Err(Error::invalid("xi", "must be > 0"));
    }
    if !(t.is_finite() && t >= 0.0) {
        return Err(Error::invalid("t", "must be finite and >= 0"));
    }
    let kp = polariton_loss(p, r);
    let two_xi = 2.0 * r.xi;
    let growth = (r.gamma_l + kp) / two_xi;
    let value = 0.5
        * ((-two_xi * t).exp()
            + (3.0 * r.gamma_l + kp) / two_xi
            + growth * growth * (two_xi * t).exp());
    let mut warnings = Vec::new();
    if r.xi * t <= 1.0 {
        warnings.push(format!(
            "xi t = {:.3} <= 1; formula assumes xi t > 1",
            r.xi * t
        ));
    }
    if (p.g1 - p.g2).abs() > 1e-12 * p.g1.max(p.g2) {
        warnings.push("formula assumes g1 = g2".into());
    }
    Ok(Estimate { value, warnings })
}

/// `t*` with `exp(-2 xi t*) = (gL + k/eta)/(2 xi)`; `None` if the ratio is
/// not below one (no squeezing window).
pub fn closed_form_t_star(p: &CavityParams, r: &DerivedRates) -> Option<f64> {
    let ratio = (r.gamma_l + polariton_loss(p, r)) / (2.0 * r.xi);
    (ratio < 1.0 && ratio > 0.0).then(|| -ratio.ln() / (2.0 * r.xi))
}

/// Minimum of the three-term formula, `(5 gL + 3 k/eta) / (4 xi)`.
pub fn closed_form_min(p: &CavityParams, r: &DerivedRates) -> f64 {
    (5.0 * r.gamma_l + 3.0 * polariton_loss(p, r)) / (4.0 * r.xi)
}

/// `Delta_opt = gamma sqrt(5 Omega1² / (3 Omega2²) g² N / (gamma kappa))`.
pub fn closed_form_delta_opt(p: &CavityParams) -> f64 {
    let ratio = p.omega1 * p.omega1 / (p.omega2 * p.omega2);
    p.gamma * (5.0 * ratio / 3.0 * p.cooperativity()).sqrt()
}

/// `sqrt(15/4) / sqrt(g² N / (gamma kappa))`.
pub fn closed_form_var_opt(p: &CavityParams) -> f64 {
    3.75f64.sqrt() / p.cooperativity().sqrt()
}

/// Numerical minimum over time of `Var(Y+)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureMinimum {
    pub t_min: f64,
    pub var_y_plus_min: f64,
    /// Smallest `C + iΩ/2` eigenvalue seen along the run.
    pub min_symplectic_eigenvalue: f64,
}

/// Marches the covariance forward until `Var(Y+)` has clearly passed its
/// minimum, then refines the minimum with a parabola. Returns `t_min = 0`
/// when the variance never drops below its initial value.
pub fn min_var_y_plus(p: &CavityParams) -> Result<QuadratureMinimum> {
    let r = derive_rates(p)?;
    let (a, d) = drift_diffusion(p, &r);
    let scale = closed_form_t_star(p, &r)
        .unwrap_or(0.0)
        .max(1.0 / (2.0 * r.xi + r.gamma_l + polariton_loss(p, &r)));
    let dt = scale / 200.0;
    let limit = LINEARIZATION_FRACTION * p.n_atoms;
    let max_steps = 200 * 50;

    let mut c = vacuum(4);
    let mut ts = vec![0.0];
    let mut vs = vec![quadrature_stats(&c).var_y_plus];
    let mut min_eig = symplectic_min_eigenvalue(&c);
    let mut t = 0.0;
    let chunk = 20;
    loop {
        let grid: Vec<f64> = (0..=chunk).map(|k| t + dt * k as f64).collect();
        let cs = evolve_covariance(&a, &d, &c, &grid)?;
        let mut stop = false;
        for (&tk, ck) in grid.iter().zip(&cs).skip(1) {
            let s = quadrature_stats(ck);
            min_eig = min_eig.min(symplectic_min_eigenvalue(ck));
            if s.total_excitations > limit {
                let (i, _) = argmin(&vs);
                if i == 0 || i + 1 >= vs.len() {
                    return Err(Error::LinearizationBreakdown {
                        t: tk,
                        excitations: s.total_excitations,
                        limit,
                    });
                }
                stop = true;
                break;
            }
            ts.push(tk);
            vs.push(s.var_y_plus);
        }
        c = cs.last().expect("grid nonempty").clone();
        t = *grid.last().expect("grid nonempty");
        let (i, vmin) = argmin(&vs);
        let last = *vs.last().expect("nonempty");
        let risen = i + 1 < vs.len() && last > vmin + 0.05 * (vmin.abs() + (vs[0] - vmin).abs());
        if stop || risen || ts.len() > max_steps {
            break;
        }
    }
    let (i, vmin) = argmin(&vs);
    let (t_min, v) = if i == 0 || i + 1 >= vs.len() {
        (ts[i], vmin)
    } else {
        parabola_vertex([ts[i - 1], ts[i], ts[i + 1]], [vs[i - 1], vs[i], vs[i + 1]])
    };
    Ok(QuadratureMinimum {
        t_min,
        var_y_plus_min: v.min(vmin),
        min_symplectic_eigenvalue: min_eig,
    })
}

fn argmin(v: &[f64]) -> (usize, f64) {
    v.iter().enumerate().fold(
        (0, f64::INFINITY),
        |acc, (i, &x)| if x < acc.1 { (i, x) } else { acc },
    )
}

/// Closed-form optimum plus a numerical scan over `Delta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OperatingPoint {
    pub delta_opt: f64,
    pub var_y_plus_opt: f64,
    pub t_star: Option<f64>,
    pub numeric_delta_opt: f64,
    pub numeric_var_y_plus: f64,
    pub numeric_t_min: f64,
}

/// Numerical `Delta` scan result.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeltaScanPoint {
    pub delta: f64,
    pub var_y_plus_min: f64,
    pub t_min: f64,
}

/// Minimum `Var(Y+)` at each `Delta`, evaluated in parallel.
pub fn scan_delta(p: &CavityParams, deltas: &[f64]) -> Result<Vec<DeltaScanPoint>> {
    if deltas.is_empty() {
        return Err(Error::EmptyGrid("deltas"));
    }
    deltas
        .par_iter()
        .map(|&delta| {
            let q = CavityParams { delta, ..*p };
            let m = min_var_y_plus(&q)?;
            Ok(DeltaScanPoint {
                delta,
                var_y_plus_min: m.var_y_plus_min,
                t_min: m.t_min,
            })
        })
        .collect()
}

/// Closed-form optimum and the best `Delta` found on a logarithmic scan of
/// `[Delta_opt / 3, 3 Delta_opt]`, clipped to `Delta >= 10 gamma`.
pub fn optimal_operating_point(p: &CavityParams) -> Result<OperatingPoint> {
    p.validate()?;
    let delta_opt = closed_form_delta_opt(p);
    let lo = (delta_opt / 3.0).max(10.0 * p.gamma);
    let hi = (3.0 * delta_opt).max(lo * 1.5);
    let n = 41;
    let deltas: Vec<f64> = (0..n)
        .map(|k| lo * (hi / lo).powf(k as f64 / (n - 1) as f64))
        .collect();
    let scan = scan_delta(p, &deltas)?;
    let vals: Vec<f64> = scan.iter().map(|s| s.var_y_plus_min).collect();
    let (i, _) = argmin(&vals);
    let (numeric_delta_opt, numeric_var) = if i == 0 || i + 1 >= n {
        (deltas[i], vals[i])
    } else {
        let (lx, v) = parabola_vertex(
            [deltas[i - 1].ln(), deltas[i].ln(), deltas[i + 1].ln()],
            [vals[i - 1], vals[i], vals[i + 1]],
        );
        (lx.exp(), v)
    };
    let at_opt = CavityParams {
        delta: delta_opt.max(10.0 * p.gamma),
        ..*p
    };
    let r = derive_rates(&at_opt)?;
    Ok(OperatingPoint {
        delta_opt,
        var_y_plus_opt: closed_form_var_opt(p),
        t_star: closed_form_t_star(&at_opt, &r),
        numeric_delta_opt,
        numeric_var_y_plus: numeric_var,
        numeric_t_min: scan[i].t_min,
    })
}

/// `Var(Y+)` at the closed-form `t*` as a function of `d1 - d2`, with `d2`
/// held at its configured value.
pub fn scan_two_photon_detuning(p: &CavityParams, dbar: &[f64]) -> Result<Vec<(f64, f64)>> {
    if dbar.is_empty() {
        return Err(Error::EmptyGrid("dbar"));
    }
    let r = derive_rates(p)?;
    let t_star = closed_form_t_star(p, &r)
        .ok_or_else(|| Error::invalid("params", "no squeezing window (gL + k/eta >= 2 xi)"))?;
    dbar.par_iter()
        .map(|&db| {
            let q = CavityParams {
                delta1: p.delta2 + db,
                ..*p
            };
            let pts = simulate(&q, &[0.0, t_star])?;
            Ok((db, pts[1].stats.var_y_plus))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    None,
    Squeezed,
    Strong,
    Heisenberg,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Inequality {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeReport {
    pub regime: Regime,
    /// `g² N / (kappa gamma)`.
    pub cooperativity: f64,
    /// `g² / (kappa gamma)`.
    pub single_atom_cooperativity: f64,
    pub n_atoms: f64,
    /// `sqrt(15/4) / sqrt(cooperativity)`.
    pub predicted_var_y_plus: f64,
    pub inequalities: Vec<Inequality>,
}

/// Classifies by cooperativity: `none` if `g² N <= kappa gamma`,
/// `heisenberg` if `g² >= N kappa gamma`, `strong` if `g² >= kappa gamma`,
/// else `squeezed`.
pub fn regime_classifier(p: &CavityParams) -> Result<RegimeReport> {
    p.validate()?;
    let kg = p.kappa_cav * p.gamma;
    let g2 = p.g1 * p.g1;
    let c = g2 * p.n_atoms / kg;
    let c1 = g2 / kg;
    let ineq = |name: &str, lhs: f64, rhs: f64| Inequality {
        name: name.into(),
        lhs,
        rhs,
        holds: lhs > rhs,
    };
    let squeezing = ineq("g^2 N > kappa gamma", g2 * p.n_atoms, kg);
    let strong = Inequality {
        holds: g2 >= kg,
        ..ineq("g^2 >= kappa gamma", g2, kg)
    };
    let heisenberg = Inequality {
        holds: g2 >= p.n_atoms * kg,
        ..ineq("g^2 >= N kappa gamma", g2, p.n_atoms * kg)
    };
    let regime = if !squeezing.holds {
        Regime::None
    } else if heisenberg.holds {
        Regime::Heisenberg
    } else if strong.holds {
        Regime::Strong
    } else {
        Regime::Squeezed
    };
    Ok(RegimeReport {
        regime,
        cooperativity: c,
        single_atom_cooperativity: c1,
        n_atoms: p.n_atoms,
        predicted_var_y_plus: 3.75f64.sqrt() / c.sqrt(),
        inequalities: vec![squeezing, strong, heisenberg],
    })
}

/// One point of the degenerate single-mode model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DegeneratePoint {
    pub t: f64,
    pub var_x: f64,
    pub var_y: f64,
}

/// Single-mode squeezing when both spin flips end in the same state:
/// `dS/dt = -2 xi S† - lambda S + F` with `lambda = kappa/eta + gL + g0 - gain`
/// and diffusion equal to the sum of the two-mode diffusions. `X` is
/// squeezed; without loss `Var(X) = ½ exp(-4 xi t)`.
pub fn degenerate_variance(
    p: &CavityParams,
    t_grid: &[f64],
) -> Result<Estimate<Vec<DegeneratePoint>>> {
    let r = derive_rates(p)?;
    let (a4, d4) = drift_diffusion(p, &r);
    let lambda = -(a4[(X1, X1)] + a4[(XD, XD)]);
    let diff = d4[(X1, X1)] + d4[(XD, XD)];
    let two_xi = 2.0 * r.xi;
    let a = RMatrix::from_row_slice(2, 2, &[-two_xi - lambda, 0.0, 0.0, two_xi - lambda]);
    let d = RMatrix::identity(2, 2) * diff;
    let cs = evolve_covariance(&a, &d, &vacuum(2), t_grid)?;
    let limit = LINEARIZATION_FRACTION * p.n_atoms;
    let mut pts = Vec::with_capacity(cs.len());
    for (&t, c) in t_grid.iter().zip(&cs) {
        if c.trace() > limit {
            return Err(Error::LinearizationBreakdown {
                t,
                excitations: c.trace(),
                limit,
            });
        }
        pts.push(DegeneratePoint {
            t,
            var_x: c[(0, 0)],
            var_y: c[(1, 1)],
        });
    }
    let mut warnings = Vec::new();
    if r.eta < 10.0 {
        warnings.push(format!("eta = {:.3} < 10; P_D ≈ -S needs eta >> 1", r.eta));
    }
    Ok(Estimate {
        value: pts,
        warnings,
    })
}

/// Smallest `Var(X)` of the degenerate model reached before the
/// anti-squeezed quadrature leaves the linear regime. Returns `(t, Var(X))`.
pub fn degenerate_minimum(p: &CavityParams) -> Result<Estimate<(f64, f64)>> {
    let r = derive_rates(p)?;
    let (a4, d4) = drift_diffusion(p, &r);
    let lambda = -(a4[(X1, X1)] + a4[(XD, XD)]);
    let growth = 4.0 * r.xi - 2.0 * lambda;
    let diff = d4[(X1, X1)] + d4[(XD, XD)];
    // Var(Y) ~ ½ exp(growth t) + diff / growth; stop at 90% of the time it
    // takes to reach the linearization limit.
    let limit = LINEARIZATION_FRACTION * p.n_atoms;
    let t_end = if growth > 0.0 {
        0.9 * (2.0 * limit / (1.0 + 2.0 * diff / growth)).max(1.0).ln() / growth
    } else {
        20.0 / (4.0 * r.xi + 2.0 * lambda)
    };
    let n = 400;
    let grid: Vec<f64> = (0..=n).map(|k| t_end * k as f64 / n as f64).collect();
    let run = degenerate_variance(p, &grid)?;
    let best = run
        .value
        .iter()
        .map(|pt| (pt.t, pt.var_x))
        .fold(
            (0.0, f64::INFINITY),
            |acc, x| if x.1 < acc.1 { x } else { acc },
        );
    Ok(Estimate {
        value: best,
        warnings: run.warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn base() -> CavityParams {
        CavityParams::symmetric(1e4, 1.0).unwrap()
    }

    #[test]
    fn rate_definitions() {
        let mut p = base();
        p.omega2 = 100.0; // g2² N = Omega2²
        let r = derive_rates(&p).unwrap();
        assert_abs_diff_eq!(r.eta, 1.0, epsilon = 1e-15);

        let mut p = base();
        p.omega1 = 10.0;
        p.delta = 100.0;
        assert_abs_diff_eq!(derive_rates(&p).unwrap().gamma_l, 0.01, epsilon = 1e-15);

        let mut p = base();
        p.n_atoms = 1e12;
        let r = derive_rates(&p).unwrap();
        let limit = p.omega1 * p.omega2 / p.delta;
        assert!((r.xi - limit).abs() / limit < 1e-11);
    }

    #[test]
    fn lossless_gain_cancels_with_equal_couplings() {
        let mut p = base();
        p.g1 = 0.0;
        p.g2 = 1.0;
        let r = derive_rates(&p).unwrap();
        assert_eq!(r.xi, 0.0);
        let p = base();
        let r = DerivedRates {
            xi: 0.0,
            ..derive_rates(&p).unwrap()
        };
        let (a, _) = drift_diffusion(&p, &r);
        let l = p.kappa_cav / r.eta + r.gamma_l;
        let expect = RMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![0.0, 0.0, -l, -l]));
        assert!((a - expect).amax() < 1e-15);
    }

    #[test]
    fn drift_couplings_and_diffusion_calibration() {
        let mut p = base();
        p.kappa_cav = 0.0;
        let r = derive_rates(&p).unwrap();
        let (a, d) = drift_diffusion(&p, &r);
        assert_eq!(a[(X1, XD)], r.xi);
        assert_eq!(a[(XD, X1)], r.xi);
        assert_eq!(a[(Y1, YD)], -r.xi);
        assert_eq!(a[(YD, Y1)], -r.xi);
        let expect = RMatrix::identity(4, 4) * (2.0 * r.gamma_l);
        assert!((d - expect).amax() < 1e-18);
    }

    #[test]
    fn pure_cavity_loss_keeps_vacuum() {
        let a = RMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![0.0, 0.0, -0.3, -0.3]));
        let d = RMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![0.0, 0.0, 0.3, 0.3]));
        let cs = evolve_covariance(&a, &d, &vacuum(4), &[0.0, 1.0, 5.0]).unwrap();
        for c in cs {
            assert!((c - vacuum(4)).amax() < 1e-12);
        }
    }

    #[test]
    fn zero_drift_keeps_state() {
        let z = RMatrix::zeros(4, 4);
        let cs = evolve_covariance(&z, &z, &vacuum(4), &[0.0, 2.0]).unwrap();
        assert!((&cs[1] - vacuum(4)).amax() < 1e-15);
    }

    #[test]
    fn vacuum_and_correlated_stats() {
        let s = quadrature_stats(&vacuum(4));
        for v in [s.var_x_minus, s.var_x_plus, s.var_y_minus, s.var_y_plus] {
            assert_abs_diff_eq!(v, 0.5, epsilon = 1e-15);
        }
        assert_abs_diff_eq!(s.total_excitations, 2.0, epsilon = 1e-15);
        let mut c = vacuum(4);
        c[(Y1, YD)] = -0.5;
        c[(YD, Y1)] = -0.5;
        assert_abs_diff_eq!(quadrature_stats(&c).var_y_plus, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn unphysical_covariance_is_rejected() {
        let c = vacuum(4) * 0.5;
        assert!(matches!(
            check_covariance(&c, 0.0),
            Err(Error::Physicality { .. })
        ));
    }

    #[test]
    fn no_interaction_no_squeezing() {
        let mut p = base();
        p.g1 = 0.0;
        let grid: Vec<f64> = (0..50).map(|k| k as f64 * 10.0).collect();
        for pt in simulate(&p, &grid).unwrap() {
            assert!(pt.stats.var_y_plus >= 0.5 - 1e-12);
        }
    }

    #[test]
    fn analytic_limits() {
        let p = base();
        let r = derive_rates(&p).unwrap();
        let lossless = DerivedRates { gamma_l: 0.0, ..r };
        let q = CavityParams {
            kappa_cav: 0.0,
            ..p
        };
        let t = 300.0;
        let v = analytic_quadrature(&lossless, &q, t).unwrap().value;
        assert_abs_diff_eq!(v, 0.5 * (-2.0 * r.xi * t).exp(), epsilon = 1e-15);

        let ts = closed_form_t_star(&p, &r).unwrap();
        let at = analytic_quadrature(&r, &p, ts).unwrap().value;
        assert_abs_diff_eq!(at, closed_form_min(&p, &r), epsilon = 1e-12);
    }

    #[test]
    fn closed_form_optimum() {
        let p = base();
        assert_abs_diff_eq!(
            closed_form_var_opt(&p),
            3.75f64.sqrt() / 100.0,
            epsilon = 1e-15
        );
        let r = derive_rates(&p).unwrap();
        // At Delta_opt and eta >> 1 the minimum formula reduces to the optimum.
        assert!(
            (closed_form_min(&p, &r) - closed_form_var_opt(&p)).abs()
                < 1e-3 * closed_form_var_opt(&p)
        );
        let weak = CavityParams::symmetric(1.0, 1.0).unwrap_err();
        assert!(matches!(
            weak,
            Error::InvalidParameter { name: "delta", .. }
        ));
        let mut w = base();
        w.n_atoms = 1.0;
        assert!(closed_form_var_opt(&w) > 1.9);
    }

    #[test]
    fn operating_point_scan() {
        let p = base();
        let op = optimal_operating_point(&p).unwrap();
        assert_abs_diff_eq!(op.delta_opt, closed_form_delta_opt(&p), epsilon = 1e-12);
        assert!(
            op.numeric_delta_opt > op.delta_opt / 3.0 && op.numeric_delta_opt < 3.0 * op.delta_opt
        );
        let at_cf = min_var_y_plus(&p).unwrap().var_y_plus_min;
        assert!(op.numeric_var_y_plus <= at_cf);
        assert!((0.015..=0.025).contains(&op.numeric_var_y_plus));
        // Minimum ~ (5 gL + 2 kappa/eta)/(4 xi): optimum sits sqrt(3/2) above the closed form.
        let ratio = op.numeric_delta_opt / op.delta_opt;
        assert!((ratio / 1.5f64.sqrt() - 1.0).abs() < 0.05, "{ratio}");
    }

    #[test]
    fn regimes() {
        let mut p = base();
        p.g1 = (0.5f64 / 1e4).sqrt();
        assert_eq!(regime_classifier(&p).unwrap().regime, Regime::None);
        let mut p = base();
        p.g1 = 1.0;
        let rep = regime_classifier(&p).unwrap();
        assert_eq!(rep.regime, Regime::Strong);
        assert!(rep.predicted_var_y_plus > 0.01 && rep.predicted_var_y_plus < 0.03);
        p.g1 = 100.0;
        let rep = regime_classifier(&p).unwrap();
        assert_eq!(rep.regime, Regime::Heisenberg);
        assert!(rep.predicted_var_y_plus * 1e4 < 3.0);
        p.g1 = 0.1;
        assert_eq!(regime_classifier(&p).unwrap().regime, Regime::Squeezed);
        let json = serde_json::to_string(&rep).unwrap();
        assert!(json.contains("\"regime\":\"heisenberg\""));
    }

    #[test]
    fn degenerate_lossless_rate() {
        let mut p = base();
        p.kappa_cav = 0.0;
        p.gamma = 1e-12;
        p.gamma_br1 = 1e-12;
        p.gamma_br2 = 1e-12;
        p.delta = 200.0;
        let r = derive_rates(&p).unwrap();
        let grid = [0.0, 50.0, 100.0];
        let run = degenerate_variance(&p, &grid).unwrap();
        for pt in &run.value {
            let expect = 0.5 * (-4.0 * r.xi * pt.t).exp();
            assert!((pt.var_x - expect).abs() < 1e-6 * expect, "{pt:?}");
            assert!(pt.var_x * pt.var_y >= 0.25 - 1e-9);
        }
    }

    #[test]
    fn bad_params() {
        let mut p = base();
        p.gamma_br1 = 0.5;
        assert!(p.validate().is_err());
        let mut p = base();
        p.delta = 5.0;
        assert!(p.validate().is_err());
        let mut p = base();
        p.omega2 = 0.0;
        assert!(derive_rates(&p).is_err());
        let mut p = base();
        p.delta = 20.0;
        assert!(!p.warnings().is_empty());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn uncertainty_products_hold(
            log_c in 2.5f64..5.0,
            scale in 0.3f64..3.0,
            omega1 in 0.5f64..2.0,
            d1 in -0.5f64..0.5,
            d2 in -0.5f64..0.5,
            gamma0 in 0.0f64..0.01,
        ) {
            let mut p = CavityParams::symmetric(10f64.powf(log_c), 1.0).unwrap();
            p.delta = (p.delta * scale).max(10.0);
            p.omega1 = omega1;
            p.delta1 = d1;
            p.delta2 = d2;
            p.gamma0 = gamma0;
            let r = derive_rates(&p).unwrap();
            let (a, d) = drift_diffusion(&p, &r);
            let t_end = 3.0 * closed_form_t_star(&p, &r).unwrap_or(10.0).min(1e3);
            let grid: Vec<f64> = (0..=40).map(|k| t_end * k as f64 / 40.0).collect();
            let cs = evolve_covariance(&a, &d, &vacuum(4), &grid).unwrap();
            for c in &cs {
                prop_assert!(symplectic_min_eigenvalue(c) >= -1e-9);
                let q = quadrature_stats(c);
                prop_assert!(q.var_y_plus * q.var_y_minus >= 0.25 - 1e-9);
                prop_assert!(q.var_x_plus * q.var_x_minus >= 0.25 - 1e-9);
            }
        }

        #[test]
        fn rate_identities(
            g1 in 0.1f64..2.0,
            g2 in 0.1f64..2.0,
            omega1 in 0.1f64..5.0,
            omega2 in 0.1f64..5.0,
            delta in 10.0f64..1e3,
            log_n in 0.0f64..8.0,
        ) {
            let mut p = base();
            p.g1 = g1;
            p.g2 = g2;
            p.omega1 = omega1;
            p.omega2 = omega2;
            p.delta = delta;
            p.n_atoms = 10f64.powf(log_n);
            let r = derive_rates(&p).unwrap();
            let tol = 1e-14;
            prop_assert!((r.eta * omega2 * omega2 / (g2 * g2 * p.n_atoms) - 1.0).abs() < tol);
            prop_assert!((r.gamma_l - p.gamma * r.delta_l / delta).abs() <= tol * r.gamma_l);
            let xi = r.chi_raman * omega2 / (g2 * g2 * p.n_atoms + omega2 * omega2).sqrt();
            prop_assert!((r.xi - xi).abs() <= tol * xi);
        }
    }
}
