// SPDX-License-Identifier: Apache-2.0

//! Collective-spin states in the symmetric (Dicke) subspace.
//!
//! Basis vectors are `|J, m>` with `J = N/2` and index `i = m + J`, so
//! index 0 is the all-ground state `m = -J`. Operators are dense complex
//! matrices; the dimension never exceeds a few hundred.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

/// Cartesian axis of the collective spin.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    Z,
}

/// `Jx, Jy, Jz, J+, J-` for a spin of length `J = N/2`.
#[derive(Debug, Clone)]
pub struct SpinOperators {
    two_j: usize,
    pub jx: CMatrix,
    pub jy: CMatrix,
    pub jz: CMatrix,
    pub jp: CMatrix,
    pub jm: CMatrix,
}

impl SpinOperators {
    /// Builds the operator set for `n_atoms` two-level atoms.
    pub fn new(n_atoms: usize) -> Result<Self> {
        if n_atoms == 0 {
            return Err(Error::invalid("N", "atom count must be at least 1"));
        }
        let dim = n_atoms + 1;
        let j = n_atoms as f64 / 2.0;
        let mut jz = CMatrix::zeros(dim, dim);
        let mut jp = CMatrix::zeros(dim, dim);
        for i in 0..dim {
            let m = i as f64 - j;
            jz[(i, i)] = Complex64::new(m, 0.0);
            if i + 1 < dim {
                // <m+1| J+ |m> = sqrt(J(J+1) - m(m+1))
                jp[(i + 1, i)] = Complex64::new((j * (j + 1.0) - m * (m + 1.0)).sqrt(), 0.0);
            }
        }
        let jm = jp.adjoint();
        let jx = (&jp + &jm).scale(0.5);
        let jy = (&jp - &jm) * Complex64::new(0.0, -0.5);
        Ok(SpinOperators {
            two_j: n_atoms,
            jx,
            jy,
            jz,
            jp,
            jm,
        })
    }

    pub fn n_atoms(&self) -> usize {
        self.two_j
    }

    pub fn spin_length(&self) -> f64 {
        self.two_j as f64 / 2.0
    }

    pub fn dim(&self) -> usize {
        self.two_j + 1
    }

    pub fn axis(&self, axis: Axis) -> &CMatrix {
        match axis {
            Axis::X => &self.jx,
            Axis::Y => &self.jy,
            Axis::Z => &self.jz,
        }
    }

    /// Largest entry of `|[Jx, Jy] - i Jz|`.
    pub fn commutator_residual(&self) -> f64 {
        let comm = &self.jx * &self.jy - &self.jy * &self.jx;
        let r = comm - &self.jz * Complex64::i();
        r.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

/// A normalized pure state of the symmetric subspace.
#[derive(Debug, Clone, PartialEq)]
pub struct DickeState {
    two_j: usize,
    amplitudes: CVector,
}

impl DickeState {
    /// Wraps and normalizes an amplitude vector ordered by `m = -J..=J`.
    pub fn from_amplitudes(amplitudes: CVector) -> Result<Self> {
        if amplitudes.len() < 2 {
            return Err(Error::invalid(
                "amplitudes",
                "need at least two entries (N >= 1)",
            ));
        }
        let norm = amplitudes.norm();
        if !norm.is_finite() || norm == 0.0 {
            return Err(Error::invalid(
                "amplitudes",
                "vector must have finite nonzero norm",
            ));
        }
        Ok(DickeState {
            two_j: amplitudes.len() - 1,
            amplitudes: amplitudes.unscale(norm),
        })
    }

    pub fn n_atoms(&self) -> usize {
        self.two_j
    }

    pub fn spin_length(&self) -> f64 {
        self.two_j as f64 / 2.0
    }

    pub fn dim(&self) -> usize {
        self.two_j + 1
    }

    pub fn amplitudes(&self) -> &CVector {
        &self.amplitudes
    }

    pub fn norm_deviation(&self) -> f64 {
        (self.amplitudes.norm_squared() - 1.0).abs()
    }

    /// `<psi| A |psi>`.
    pub fn expectation(&self, op: &CMatrix) -> Complex64 {
        self.amplitudes.dotc(&(op * &self.amplitudes))
    }

    /// Outer product `|psi><psi|`.
    pub fn density_matrix(&self) -> CMatrix {
        &self.amplitudes * self.amplitudes.adjoint()
    }
}

/// All atoms in the ground state, `|J, -J>`.
pub fn bloch_ground_state(n_atoms: usize) -> Result<DickeState> {
    if n_atoms == 0 {
        return Err(Error::invalid("N", "atom count must be at least 1"));
    }
    let mut amps = CVector::zeros(n_atoms + 1);
    amps[0] = Complex64::new(1.0, 0.0);
    DickeState::from_amplitudes(amps)
}

/// Eigen-decomposition of a Hermitian matrix with eigenvalues in ascending
/// order. Columns of the returned matrix are the eigenvectors.
pub fn hermitian_eigen(op: &CMatrix) -> (Vec<f64>, CMatrix) {
    let eig = SymmetricEigen::new(op.clone());
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vecs = CMatrix::zeros(op.nrows(), op.ncols());
    for (dst, &src) in order.iter().enumerate() {
        vecs.set_column(dst, &eig.eigenvectors.column(src));
    }
    (values, vecs)
}

/// Rotates `v` by a global phase so its largest-magnitude component is real
/// and positive.
fn fix_phase_largest_real(v: &mut CVector) {
    let (_, pivot) = v
        .iter()
        .enumerate()
        .fold((0.0, 0usize), |(best, idx), (i, z)| {
            if z.norm() > best + 1e-12 {
                (z.norm(), i)
            } else {
                (best, idx)
            }
        });
    let phase = v[pivot] / v[pivot].norm();
    *v = v.map(|z| z / phase);
}

/// Eigenvectors `|Jx = -1>, |Jx = 0>, |Jx = +1>` in the x-quantized
/// Condon–Shortley convention: `|Jx=0>` has its largest component real
/// positive and `(Jy + i Jz)` raises with positive real matrix elements.
fn jx_central_triplet(ops: &SpinOperators) -> [CVector; 3] {
    let (values, vecs) = hermitian_eigen(&ops.jx);
    let j = ops.spin_length();
    let pick = |m: f64| {
        let idx = values
            .iter()
            .position(|&v| (v - m).abs() < 0.5)
            .expect("Jx spectrum contains every m in -J..=J");
        vecs.column(idx).into_owned()
    };
    debug_assert!(j >= 1.0);
    let mut zero = pick(0.0);
    let mut plus = pick(1.0);
    let mut minus = pick(-1.0);
    fix_phase_largest_real(&mut zero);

    let raise = &ops.jy + &ops.jz * Complex64::i();
    let align = |target: &mut CVector, elem: Complex64| {
        let phase = elem / elem.norm();
        *target = target.map(|z| z * phase);
    };
    // <+1| R |0> must be real positive: multiply |+1> by the phase of that element.
    let e_plus = plus.dotc(&(&raise * &zero));
    align(&mut plus, e_plus);
    // <0| R |-1> real positive: rotate |-1> by the conjugate phase.
    let e_minus = zero.dotc(&(&raise * &minus));
    align(&mut minus, e_minus.conj());
    [minus, zero, plus]
}

/// The squeezed family
/// `(i|Jx=0> + a (|Jx=+1> - |Jx=-1>)/sqrt 2) / sqrt(1+a^2)`.
///
/// Only even atom counts are supported.
pub fn psi_a_state(n_atoms: usize, a: f64) -> Result<DickeState> {
    if n_atoms < 2 {
        return Err(Error::invalid("N", "psi(a) needs N >= 2"));
    }
    if !n_atoms.is_multiple_of(2) {
        return Err(Error::Unsupported {
            name: "N",
            reason: format!("psi(a) is defined for even N only, got {n_atoms}"),
        });
    }
    if !a.is_finite() {
        return Err(Error::invalid("a", "family parameter must be finite"));
    }
    let ops = SpinOperators::new(n_atoms)?;
    let [minus, zero, plus] = jx_central_triplet(&ops);
    let norm = (1.0 + a * a).sqrt();
    let c0 = Complex64::new(0.0, 1.0 / norm);
    let c1 = Complex64::new(a / (norm * std::f64::consts::SQRT_2), 0.0);
    let amps = zero * c0 + (plus - minus) * c1;
    DickeState::from_amplitudes(amps)
}

/// Probability distribution over the eigenvalues `m = -J..=J` of `J_axis`.
pub fn projections(state: &DickeState, axis: Axis) -> Result<Vec<f64>> {
    let probs: Vec<f64> = match axis {
        Axis::Z => state.amplitudes.iter().map(|z| z.norm_sqr()).collect(),
        _ => {
            let ops = SpinOperators::new(state.n_atoms())?;
            let (_, vecs) = hermitian_eigen(ops.axis(axis));
            (0..state.dim())
                .map(|k| vecs.column(k).dotc(&state.amplitudes).norm_sqr())
                .collect()
        }
    };
    let total: f64 = probs.iter().sum();
    Ok(probs.into_iter().map(|p| (p / total).max(0.0)).collect())
}

/// First and second moments of the collective spin.
///
/// Variances follow `(ΔA)^2 = <A^2> - <A>^2`; the symmetrized covariances are
/// `½<AB + BA> - <A><B>`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentSummary {
    pub mean_x: f64,
    pub mean_y: f64,
    pub mean_z: f64,
    pub var_x: f64,
    pub var_y: f64,
    pub var_z: f64,
    pub sym_cov_xz: f64,
    pub sym_cov_yz: f64,
}

impl MomentSummary {
    /// `var_x var_y - ¼ mean_z²`, nonnegative up to rounding.
    pub fn uncertainty_slack(&self) -> f64 {
        self.var_x * self.var_y - 0.25 * self.mean_z * self.mean_z
    }
}

pub fn moments(state: &DickeState, ops: &SpinOperators) -> Result<MomentSummary> {
    if ops.dim() != state.dim() {
        return Err(Error::invalid(
            "ops",
            format!(
                "operator dimension {} != state dimension {}",
                ops.dim(),
                state.dim()
            ),
        ));
    }
    let psi = &state.amplitudes;
    let x = &ops.jx * psi;
    let y = &ops.jy * psi;
    let z = &ops.jz * psi;
    let mean_x = psi.dotc(&x).re;
    let mean_y = psi.dotc(&y).re;
    let mean_z = psi.dotc(&z).re;
    // <A^2> = ||A psi||^2 and <AB + BA>/2 = Re <A psi | B psi> for Hermitian A, B.
    let var_x = (x.norm_squared() - mean_x * mean_x).max(0.0);
    let var_y = (y.norm_squared() - mean_y * mean_y).max(0.0);
    let var_z = (z.norm_squared() - mean_z * mean_z).max(0.0);
    let sym_cov_xz = x.dotc(&z).re - mean_x * mean_z;
    let sym_cov_yz = y.dotc(&z).re - mean_y * mean_z;
    Ok(MomentSummary {
        mean_x,
        mean_y,
        mean_z,
        var_x,
        var_y,
        var_z,
        sym_cov_xz,
        sym_cov_yz,
    })
}

impl DickeState {
    /// Convenience wrapper building the operator set on the fly.
    pub fn moments(&self) -> MomentSummary {
        let ops = SpinOperators::new(self.n_atoms()).expect("state has N >= 1");
        moments(self, &ops).expect("dimensions agree by construction")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn spin_two_jz_is_diagonal() {
        let ops = SpinOperators::new(2).unwrap();
        for (i, m) in [-1.0, 0.0, 1.0].iter().enumerate() {
            assert_eq!(ops.jz[(i, i)], Complex64::new(*m, 0.0));
        }
        assert_eq!(ops.jz[(0, 1)], Complex64::new(0.0, 0.0));
    }

    #[test]
    fn spin_half_jx_is_half_pauli() {
        let ops = SpinOperators::new(1).unwrap();
        assert_abs_diff_eq!(ops.jx[(0, 1)].re, 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(ops.jx[(1, 0)].re, 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(ops.jx[(0, 0)].norm(), 0.0);
    }

    #[test]
    fn commutator_holds_at_forty_atoms() {
        let ops = SpinOperators::new(40).unwrap();
        assert!(ops.commutator_residual() < 1e-12);
        let hermitian = |m: &CMatrix| {
            (m - m.adjoint())
                .iter()
                .map(|z| z.norm())
                .fold(0.0, f64::max)
        };
        assert!(hermitian(&ops.jx) < 1e-15);
        assert!(hermitian(&ops.jy) < 1e-15);
        let jp = &ops.jx + &ops.jy * Complex64::i();
        assert!((jp - &ops.jp).iter().all(|z| z.norm() < 1e-15));
    }

    #[test]
    fn zero_atoms_rejected() {
        assert!(matches!(
            SpinOperators::new(0),
            Err(Error::InvalidParameter { .. })
        ));
        assert!(bloch_ground_state(0).is_err());
    }

    #[test]
    fn bloch_state_moments() {
        let m = bloch_ground_state(100).unwrap().moments();
        assert_abs_diff_eq!(m.mean_z, -50.0, epsilon = 1e-12);
        assert_abs_diff_eq!(m.var_x, 25.0, epsilon = 1e-12);
        assert_abs_diff_eq!(m.var_y, 25.0, epsilon = 1e-12);

        let m2 = bloch_ground_state(2).unwrap().moments();
        assert_abs_diff_eq!(m2.var_z, 0.0, epsilon = 1e-15);

        let m10 = bloch_ground_state(10).unwrap().moments();
        assert_abs_diff_eq!(m10.var_x * m10.var_y, 6.25, epsilon = 1e-12);

        let m16 = bloch_ground_state(16).unwrap().moments();
        assert_abs_diff_eq!(m16.mean_x, 0.0);
        assert_abs_diff_eq!(m16.mean_y, 0.0);
    }

    #[test]
    fn psi_a_matches_closed_form_moments_at_n100() {
        let m = psi_a_state(100, -1.0).unwrap().moments();
        assert_abs_diff_eq!(m.mean_z, -(1275f64).sqrt(), epsilon = 1e-8);
        assert_abs_diff_eq!(
            m.var_x.sqrt(),
            std::f64::consts::FRAC_1_SQRT_2,
            epsilon = 1e-8
        );
        assert_abs_diff_eq!(m.mean_x, 0.0, epsilon = 1e-10);
        assert_abs_diff_eq!(m.mean_y, 0.0, epsilon = 1e-10);

        let m0 = psi_a_state(100, 0.0).unwrap().moments();
        assert_abs_diff_eq!(m0.mean_z, 0.0, epsilon = 1e-10);
        assert_abs_diff_eq!(m0.var_x, 0.0, epsilon = 1e-10);
    }

    #[test]
    fn psi_a_var_y_at_n20() {
        // Exact second moments of the three-component state, K^2 = J(J+1) = 110:
        // var_y = (K^2 (2 + a^2) - 2a^2) / (4 (1 + a^2)) = 247/5
        let m = psi_a_state(20, 0.5).unwrap().moments();
        assert_abs_diff_eq!(m.var_y, 49.4, epsilon = 1e-9);
        // var_z = K^2 (2 - 3a^2 + 3a^4) / (4 (1+a^2)^2) - a^2 / (2 (1+a^2))
        let k2 = 110.0;
        let a2: f64 = 0.25;
        let var_z = k2 * (2.0 - 3.0 * a2 + 3.0 * a2 * a2) / (4.0 * (1.0 + a2).powi(2))
            - a2 / (2.0 * (1.0 + a2));
        assert_abs_diff_eq!(m.var_z, var_z, epsilon = 1e-9);
    }

    #[test]
    fn odd_atom_count_is_unsupported() {
        assert!(matches!(
            psi_a_state(7, 1.0),
            Err(Error::Unsupported { .. })
        ));
    }

    #[test]
    fn psi_a_projection_supports() {
        let state = psi_a_state(40, -1.0).unwrap();
        let px = projections(&state, Axis::X).unwrap();
        let j = 20usize;
        for (i, p) in px.iter().enumerate() {
            let m = i as i64 - j as i64;
            if m.abs() > 1 {
                assert!(*p < 1e-20, "P_x({m}) = {p}");
            }
        }
        let pz = projections(&state, Axis::Z).unwrap();
        for (i, p) in pz.iter().enumerate() {
            // m = i - 20 odd <=> i odd
            if i % 2 == 1 {
                assert!(*p < 1e-20, "P_z odd index {i} = {p}");
            }
        }
        let sum: f64 = pz.iter().sum();
        assert_abs_diff_eq!(sum, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn bloch_projection_on_z() {
        let pz = projections(&bloch_ground_state(10).unwrap(), Axis::Z).unwrap();
        assert_eq!(pz[0], 1.0);
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let ops = SpinOperators::new(4).unwrap();
        let state = bloch_ground_state(6).unwrap();
        assert!(moments(&state, &ops).is_err());
    }

    fn amplitudes_from(re: &[f64], im: &[f64]) -> CVector {
        CVector::from_iterator(
            re.len(),
            re.iter().zip(im).map(|(&r, &i)| Complex64::new(r, i)),
        )
    }

    /// `P(m) = <psi| prod_{m' != m} (J - m') / (m - m') |psi>`; no diagonalization.
    fn polynomial_projection(op: &CMatrix, psi: &CVector, m: f64, j: f64) -> f64 {
        let dim = psi.len();
        let mut v = psi.clone();
        for k in 0..dim {
            let mp = k as f64 - j;
            if (mp - m).abs() < 0.5 {
                continue;
            }
            let shifted = op * &v - &v * Complex64::new(mp, 0.0);
            v = shifted / Complex64::new(m - mp, 0.0);
        }
        psi.dotc(&v).re
    }

    #[test]
    fn psi_a_moment_table() {
        for n in [4usize, 10, 40, 100] {
            let k2 = (n as f64 / 2.0) * (n as f64 / 2.0 + 1.0);
            for a in [-2.0f64, -1.1, -1.0, -0.5, 0.0, 0.5, 1.0] {
                let a2 = a * a;
                let m = psi_a_state(n, a).unwrap().moments();
                let mean_z = a * (2.0 * k2).sqrt() / (1.0 + a2);
                let var_x = a2 / (1.0 + a2);
                let var_y = (k2 * (2.0 + a2) - 2.0 * a2) / (4.0 * (1.0 + a2));
                let var_z = k2 * (2.0 - 3.0 * a2 + 3.0 * a2 * a2) / (4.0 * (1.0 + a2).powi(2))
                    - a2 / (2.0 * (1.0 + a2));
                let close = |x: f64, y: f64| (x - y).abs() <= 1e-8 * y.abs().max(1.0);
                assert!(
                    close(m.mean_z, mean_z),
                    "N={n} a={a} mean_z {} {}",
                    m.mean_z,
                    mean_z
                );
                assert!(close(m.var_x, var_x), "N={n} a={a} var_x");
                assert!(close(m.var_y, var_y), "N={n} a={a} var_y");
                assert!(close(m.var_z, var_z), "N={n} a={a} var_z");
                assert!(m.mean_x.abs() < 1e-9 && m.mean_y.abs() < 1e-9);
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn random_states_are_physical(
            (re, im) in (1usize..10).prop_flat_map(|n| (
                prop::collection::vec(-1.0f64..1.0, n + 1),
                prop::collection::vec(-1.0f64..1.0, n + 1),
            ))
        ) {
            prop_assume!(re.iter().chain(&im).map(|x| x * x).sum::<f64>() > 1e-3);
            let state = DickeState::from_amplitudes(amplitudes_from(&re, &im)).unwrap();
            prop_assert!(state.norm_deviation() < 1e-12);
            let m = state.moments();
            prop_assert!(m.uncertainty_slack() >= -1e-10);
            let ops = SpinOperators::new(state.n_atoms()).unwrap();
            let j = state.spin_length();
            for axis in [Axis::X, Axis::Y, Axis::Z] {
                let p = projections(&state, axis).unwrap();
                let total: f64 = p.iter().sum();
                prop_assert!((total - 1.0).abs() < 1e-12);
                for (i, pi) in p.iter().enumerate() {
                    let oracle = polynomial_projection(ops.axis(axis), state.amplitudes(), i as f64 - j, j);
                    prop_assert!((pi - oracle).abs() < 1e-10, "{axis:?} m={} {pi} {oracle}", i as f64 - j);
                }
            }
        }

        #[test]
        fn psi_a_is_normalized_and_uncertainty_holds(half in 1usize..40, a in -3.0f64..3.0) {
            let state = psi_a_state(2 * half, a).unwrap();
            prop_assert!(state.norm_deviation() < 1e-12);
            prop_assert!(state.moments().uncertainty_slack() >= -1e-10);
        }
    }
}
