// SPDX-License-Identifier: Apache-2.0

//! Ramsey interferometry with collective spin states.
//!
//! The sequence is a π/2 pulse about x, free precession by `phi` about z,
//! then a -π/2 pulse about x. The detected observable is the rotated
//! population difference `Jz(phi) = Jz cos(phi) - Jx sin(phi)`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dicke::{hermitian_eigen, CMatrix, DickeState, MomentSummary, SpinOperators};
use crate::error::{Error, Result};

/// `exp(iπ/2 Jx) exp(-iφ Jz) exp(-iπ/2 Jx)`.
pub fn ramsey_unitary(n_atoms: usize, phi: f64) -> Result<CMatrix> {
    if !phi.is_finite() {
        return Err(Error::invalid("phi", "phase must be finite"));
    }
    let ops = SpinOperators::new(n_atoms)?;
    let (values, vecs) = hermitian_eigen(&ops.jx);
    let half_pi = std::f64::consts::FRAC_PI_2;
    let pulse = |sign: f64| {
        let diag = CMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
            values.len(),
            values
                .iter()
                .map(|&l| Complex64::from_polar(1.0, sign * half_pi * l)),
        ));
        &vecs * diag * vecs.adjoint()
    };
    let j = ops.spin_length();
    let precession = CMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
        ops.dim(),
        (0..ops.dim()).map(|i| Complex64::from_polar(1.0, -phi * (i as f64 - j))),
    ));
    Ok(pulse(1.0) * precession * pulse(-1.0))
}

fn signal_from(m: &MomentSummary, phi: f64) -> f64 {
    m.mean_z * phi.cos() - m.mean_x * phi.sin()
}

fn slope_from(m: &MomentSummary, phi: f64) -> f64 {
    -m.mean_z * phi.sin() - m.mean_x * phi.cos()
}

fn std_dev_from(m: &MomentSummary, phi: f64) -> f64 {
    let (s, c) = phi.sin_cos();
    // ⟨JxJz + JzJx⟩ - 2⟨Jz⟩⟨Jx⟩ = 2 sym_cov_xz
    let var = m.var_z * c * c + m.var_x * s * s - c * s * 2.0 * m.sym_cov_xz;
    var.max(0.0).sqrt()
}

fn accuracy_from(m: &MomentSummary, phi: f64) -> Result<f64> {
    let slope = slope_from(m, phi);
    let scale = m.mean_z.abs().max(m.mean_x.abs()).max(1.0);
    if slope.abs() <= 1e-9 * scale {
        return Err(Error::ZeroSensitivity { phi, slope });
    }
    Ok(std_dev_from(m, phi) / slope.abs())
}

/// Mean detected signal `<Jz(phi)>`.
pub fn ramsey_signal(state: &DickeState, phi: f64) -> f64 {
    signal_from(&state.moments(), phi)
}

/// Standard deviation `ΔJz(phi)` of the detected signal.
pub fn ramsey_variance(state: &DickeState, phi: f64) -> f64 {
    std_dev_from(&state.moments(), phi)
}

/// Analytic slope `d<Jz(phi)>/dphi`.
pub fn ramsey_sensitivity(state: &DickeState, phi: f64) -> f64 {
    slope_from(&state.moments(), phi)
}

/// Phase accuracy `ΔJz(phi) / |d<Jz(phi)>/dphi|`.
///
/// Returns [`Error::ZeroSensitivity`] at extrema of the fringe, where the
/// slope vanishes.
pub fn phase_accuracy(state: &DickeState, phi: f64) -> Result<f64> {
    accuracy_from(&state.moments(), phi)
}

/// One phase point of a Ramsey fringe. `phase_accuracy` is `None` where the
/// fringe slope vanishes; such rows are kept and flagged rather than dropped.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RamseyRow {
    pub phi: f64,
    /// Fraction of atoms detected in the upper state, `(N/2 + <Jz(phi)>)/N`.
    pub excited_fraction: f64,
    pub signal: f64,
    pub std_dev: f64,
    pub phase_accuracy: Option<f64>,
}

impl RamseyRow {
    pub fn is_flagged(&self) -> bool {
        self.phase_accuracy.is_none()
    }
}

pub fn ramsey_sweep(state: &DickeState, phi_grid: &[f64]) -> Result<Vec<RamseyRow>> {
    if phi_grid.is_empty() {
        return Err(Error::EmptyGrid("phi_grid"));
    }
    if phi_grid.iter().any(|p| !p.is_finite()) {
        return Err(Error::invalid("phi_grid", "phases must be finite"));
    }
    let m = state.moments();
    let n = state.n_atoms() as f64;
    Ok(phi_grid
        .iter()
        .map(|&phi| {
            let signal = signal_from(&m, phi);
            RamseyRow {
                phi,
                excited_fraction: ((0.5 * n + signal) / n).clamp(0.0, 1.0),
                signal,
                std_dev: std_dev_from(&m, phi),
                phase_accuracy: accuracy_from(&m, phi).ok(),
            }
        })
        .collect())
}

/// `n` phases at the midpoints of `n` equal cells covering `[start, end)`.
///
/// Midpoints avoid the exact fringe extrema at multiples of π that an
/// endpoint-inclusive grid would hit.
pub fn midpoint_grid(start: f64, end: f64, n: usize) -> Vec<f64> {
    let w = (end - start) / n as f64;
    (0..n).map(|k| start + (k as f64 + 0.5) * w).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dicke::{bloch_ground_state, psi_a_state};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn max_abs(m: &CMatrix) -> f64 {
        m.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    #[test]
    fn zero_phase_is_identity() {
        let u = ramsey_unitary(6, 0.0).unwrap();
        assert!(max_abs(&(u - CMatrix::identity(7, 7))) < 1e-12);
    }

    #[test]
    fn conjugation_flips_and_rotates_jz() {
        let ops = SpinOperators::new(2).unwrap();
        let u = ramsey_unitary(2, PI).unwrap();
        let rotated = u.adjoint() * &ops.jz * &u;
        assert!(max_abs(&(rotated + &ops.jz)) < 1e-12);

        for n in [1, 4, 9] {
            let ops = SpinOperators::new(n).unwrap();
            let u = ramsey_unitary(n, FRAC_PI_2).unwrap();
            let rotated = u.adjoint() * &ops.jz * &u;
            assert!(max_abs(&(rotated + &ops.jx)) < 1e-11, "N={n}");
            let unitarity = u.adjoint() * &u - CMatrix::identity(n + 1, n + 1);
            assert!(max_abs(&unitarity) < 1e-10);
        }
    }

    #[test]
    fn bloch_signal_and_noise() {
        let s = bloch_ground_state(100).unwrap();
        assert_abs_diff_eq!(ramsey_signal(&s, 0.0), -50.0, epsilon = 1e-12);
        assert_abs_diff_eq!(ramsey_signal(&s, FRAC_PI_2), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(ramsey_variance(&s, FRAC_PI_2), 5.0, epsilon = 1e-12);
        assert_abs_diff_eq!(phase_accuracy(&s, FRAC_PI_2).unwrap(), 0.1, epsilon = 1e-12);
    }

    #[test]
    fn psi_a_signal_and_accuracy() {
        let s = psi_a_state(100, -1.0).unwrap();
        assert_abs_diff_eq!(ramsey_signal(&s, FRAC_PI_2), 0.0, epsilon = 1e-8);
        assert_abs_diff_eq!(ramsey_signal(&s, PI), 1275f64.sqrt(), epsilon = 1e-8);
        assert_abs_diff_eq!(
            ramsey_variance(&s, FRAC_PI_2),
            0.5f64.sqrt(),
            epsilon = 1e-9
        );
        let best = 1.0 / 2550f64.sqrt();
        assert_abs_diff_eq!(
            phase_accuracy(&s, FRAC_PI_2).unwrap(),
            best,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            phase_accuracy(&s, -FRAC_PI_2).unwrap(),
            best,
            epsilon = 1e-12
        );
        // away from pi/2 the Jz spread of the input state leaks in
        let m = s.moments();
        for phi in [0.3, 1.0, 2.0, 4.0] {
            let dphi = phase_accuracy(&s, phi).unwrap();
            let exact = (m.var_z * phi.cos().powi(2) + m.var_x * phi.sin().powi(2)).sqrt()
                / (m.mean_z * phi.sin()).abs();
            assert_abs_diff_eq!(dphi, exact, epsilon = 1e-10);
            assert!(dphi > best);
        }
    }

    #[test]
    fn variance_at_zero_phase_is_input_spread() {
        let s = psi_a_state(20, 0.7).unwrap();
        let m = s.moments();
        assert_abs_diff_eq!(ramsey_variance(&s, 0.0), m.var_z.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn small_a_approaches_root_two_over_n() {
        let a = 1e-6;
        let s = psi_a_state(100, a).unwrap();
        let dphi = phase_accuracy(&s, FRAC_PI_2).unwrap();
        let exact = ((1.0 + a * a) / 2.0).sqrt() / 2550f64.sqrt();
        assert!((dphi - exact).abs() / exact < 1e-6);
        assert!((dphi - 2f64.sqrt() / 100.0).abs() / (2f64.sqrt() / 100.0) < 0.01);
    }

    #[test]
    fn zero_slope_is_an_error() {
        let s = bloch_ground_state(10).unwrap();
        assert!(matches!(
            phase_accuracy(&s, 0.0),
            Err(Error::ZeroSensitivity { .. })
        ));
    }

    #[test]
    fn sweep_flags_extrema_and_follows_fringe() {
        let s = bloch_ground_state(100).unwrap();
        let grid: Vec<f64> = (0..=40).map(|k| 2.0 * PI * k as f64 / 40.0).collect();
        let rows = ramsey_sweep(&s, &grid).unwrap();
        assert_eq!(rows.len(), 41);
        assert!(rows[0].is_flagged());
        for r in &rows {
            assert_abs_diff_eq!(
                r.excited_fraction,
                (1.0 - r.phi.cos()) / 2.0,
                epsilon = 1e-12
            );
        }
        assert!(matches!(ramsey_sweep(&s, &[]), Err(Error::EmptyGrid(_))));
    }

    #[test]
    fn midpoint_grid_has_requested_length() {
        let g = midpoint_grid(0.0, PI, 401);
        assert_eq!(g.len(), 401);
        assert!(g.iter().all(|p| p.sin().abs() > 1e-3));
        assert_abs_diff_eq!(g[200], FRAC_PI_2, epsilon = 1e-15);
        assert_abs_diff_eq!(g[0], PI / 802.0, epsilon = 1e-15);
    }

    fn random_state(re: &[f64], im: &[f64]) -> DickeState {
        let v = crate::dicke::CVector::from_iterator(
            re.len(),
            re.iter().zip(im).map(|(&r, &i)| Complex64::new(r, i)),
        );
        DickeState::from_amplitudes(v).unwrap()
    }

    fn amplitude_vectors() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
        (1usize..9).prop_flat_map(|n| {
            (
                prop::collection::vec(-1.0f64..1.0, n + 1),
                prop::collection::vec(-1.0f64..1.0, n + 1),
            )
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn signal_two_ways((re, im) in amplitude_vectors(), phi in -PI..PI) {
            prop_assume!(re.iter().chain(&im).map(|x| x * x).sum::<f64>() > 1e-3);
            let state = random_state(&re, &im);
            let u = ramsey_unitary(state.n_atoms(), phi).unwrap();
            let ops = crate::dicke::SpinOperators::new(state.n_atoms()).unwrap();
            let out = &u * state.amplitudes();
            let conj = out.dotc(&(&ops.jz * &out)).re;
            prop_assert!((conj - ramsey_signal(&state, phi)).abs() < 1e-10);
        }

        #[test]
        fn heisenberg_bound((re, im) in amplitude_vectors(), phi in -PI..PI) {
            prop_assume!(re.iter().chain(&im).map(|x| x * x).sum::<f64>() > 1e-3);
            let state = random_state(&re, &im);
            if let Ok(d) = phase_accuracy(&state, phi) {
                prop_assert!(d >= 1.0 / state.n_atoms() as f64 - 1e-10);
            }
        }

        #[test]
        fn psi_a_respects_heisenberg_bound(half in 1usize..30, a in -3.0f64..3.0, phi in 0.05f64..3.09) {
            prop_assume!(a.abs() > 1e-3);
            let state = psi_a_state(2 * half, a).unwrap();
            let d = phase_accuracy(&state, phi).unwrap();
            prop_assert!(d >= 1.0 / (2 * half) as f64 - 1e-10);
        }
    }
}
