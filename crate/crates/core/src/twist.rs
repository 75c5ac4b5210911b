// SPDX-License-Identifier: Apache-2.0

//! Exact counter-twisting dynamics.
//!
//! Two bosonic modes `a1, a2` carry the atoms; the Schwinger operators are
//! `L+ = a2† a1`, `Lz = (n2 - n1)/2`, `L0 = n1 + n2`. The Hamiltonian is
//! `H = -i chi/2 (L+² - L-²) = chi (Lx Ly + Ly Lx)`.
//!
//! The lossless path works in the Dicke basis of a single number sector.
//! The lossy path solves the Lindblad equation with jump operators
//! `sqrt(2 gamma_k) a_k`, so `<n_k>` decays as `exp(-2 gamma_k t)`.
//!
//! Both `H` and the jumps preserve block structure in total number: `H`
//! acts within a sector and each jump moves the whole block from sector
//! `n + 1` to sector `n`. Starting from `|N, 0>` the density matrix is
//! block diagonal for all times, and only the blocks are evolved.

use nalgebra::DVector;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dicke::{bloch_ground_state, hermitian_eigen, CMatrix, DickeState, SpinOperators};
use crate::error::{Error, Result};
use crate::ode::{validate_grid, Rk45};

/// Largest atom number accepted by [`evolve_master`].
pub const MAX_MASTER_ATOMS: usize = 30;

const TRACE_TOL: f64 = 1e-8;
const HERMITIAN_TOL: f64 = 1e-10;
const EIGEN_TOL: f64 = 1e-8;
const POPULATION_TOL: f64 = 1e-9;
// Master-equation step tolerances; looser values let small eigenvalues of
// nearly pure states drift below -EIGEN_TOL.
const MASTER_ATOL: f64 = 1e-12;
const MASTER_RTOL: f64 = 1e-10;
const NORM_TOL: f64 = 1e-9;

/// Parameters of the lossy counter-twisting model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwistParams {
    pub n_atoms: usize,
    pub chi: f64,
    pub gamma1: f64,
    pub gamma2: f64,
}

impl TwistParams {
    pub fn new(n_atoms: usize, chi: f64, gamma1: f64, gamma2: f64) -> Result<Self> {
        let p = TwistParams {
            n_atoms,
            chi,
            gamma1,
            gamma2,
        };
        p.validate()?;
        Ok(p)
    }

    /// Equal loss `Gamma` on both modes.
    pub fn symmetric(n_atoms: usize, chi: f64, gamma: f64) -> Result<Self> {
        Self::new(n_atoms, chi, gamma, gamma)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_atoms == 0 {
            return Err(Error::invalid("N", "atom count must be at least 1"));
        }
        if !(self.chi.is_finite() && self.chi >= 0.0) {
            return Err(Error::invalid("chi", "must be finite and >= 0"));
        }
        if !(self.gamma1.is_finite() && self.gamma1 >= 0.0) {
            return Err(Error::invalid("gamma1", "must be finite and >= 0"));
        }
        if !(self.gamma2.is_finite() && self.gamma2 >= 0.0) {
            return Err(Error::invalid("gamma2", "must be finite and >= 0"));
        }
        Ok(())
    }

    /// `Gamma = (gamma1 + gamma2) / 2`.
    pub fn mean_loss(&self) -> f64 {
        0.5 * (self.gamma1 + self.gamma2)
    }

    /// `gamma = (gamma1 - gamma2) / 2`.
    pub fn loss_asymmetry(&self) -> f64 {
        0.5 * (self.gamma1 - self.gamma2)
    }
}

/// Moments of the Schwinger spin at one time.
///
/// `dxx`, `dyy` are symmetrized double covariances,
/// `D_ij = <Li Lj + Lj Li> - 2 <Li><Lj>`, so `dxx = 2 Var(Lx)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentRow {
    pub t: f64,
    pub l0: f64,
    pub lx: f64,
    pub ly: f64,
    pub lz: f64,
    pub dxx: f64,
    pub dyy: f64,
    /// `<Lx² + Ly² + Lz²>`.
    pub spin_sq: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentTrajectory {
    pub n_atoms: usize,
    pub rows: Vec<MomentRow>,
}

impl MomentTrajectory {
    pub fn times(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.t).collect()
    }

    /// `delta_xx = D_xx / N` at every time.
    pub fn scaled_dxx(&self) -> Vec<f64> {
        let n = self.n_atoms as f64;
        self.rows.iter().map(|r| r.dxx / n).collect()
    }
}

/// Index of `(n1, n2)` in the basis ordered by total number, then `n1`.
pub fn fock_index(n1: usize, n2: usize) -> usize {
    let n = n1 + n2;
    n * (n + 1) / 2 + n1
}

/// The basis `{(n1, n2) : n1 + n2 <= n_max}` in storage order.
pub fn fock_basis(n_max: usize) -> Vec<(usize, usize)> {
    (0..=n_max)
        .flat_map(|n| (0..=n).map(move |n1| (n1, n - n1)))
        .collect()
}

/// Density matrix of the two modes over the truncated Fock basis.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoModeFockDensity {
    n_max: usize,
    /// `blocks[n]` is the `(n+1) x (n+1)` block of total number `n`, indexed
    /// by `n1`.
    blocks: Vec<CMatrix>,
}

/// Result of a physicality check on a density matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityDiagnostics {
    pub trace_deviation: f64,
    pub hermiticity_error: f64,
    pub min_eigenvalue: f64,
    pub min_population: f64,
}

impl TwoModeFockDensity {
    /// `|n1 = N, n2 = 0><...|`.
    pub fn all_in_mode_one(n_atoms: usize) -> Self {
        let mut blocks: Vec<CMatrix> = (0..=n_atoms)
            .map(|n| CMatrix::zeros(n + 1, n + 1))
            .collect();
        blocks[n_atoms][(n_atoms, n_atoms)] = Complex64::new(1.0, 0.0);
        TwoModeFockDensity {
            n_max: n_atoms,
            blocks,
        }
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn dim(&self) -> usize {
        (self.n_max + 1) * (self.n_max + 2) / 2
    }

    pub fn block(&self, n: usize) -> &CMatrix {
        &self.blocks[n]
    }

    /// Full matrix over [`fock_basis`]; coherences between number sectors
    /// are zero.
    pub fn to_dense(&self) -> CMatrix {
        let dim = self.dim();
        let mut rho = CMatrix::zeros(dim, dim);
        for (n, b) in self.blocks.iter().enumerate() {
            let off = n * (n + 1) / 2;
            rho.view_mut((off, off), (n + 1, n + 1)).copy_from(b);
        }
        rho
    }

    pub fn trace(&self) -> f64 {
        self.blocks.iter().map(|b| b.trace().re).sum()
    }

    /// Probability of total number `n`.
    pub fn number_distribution(&self) -> Vec<f64> {
        self.blocks.iter().map(|b| b.trace().re).collect()
    }

    pub fn diagnostics(&self) -> DensityDiagnostics {
        let mut herm: f64 = 0.0;
        let mut min_eig = f64::INFINITY;
        let mut min_pop = f64::INFINITY;
        for b in &self.blocks {
            let d = b - b.adjoint();
            herm = herm.max(d.iter().map(|z| z.norm()).fold(0.0, f64::max));
            let sym = (b + b.adjoint()).scale(0.5);
            let (vals, _) = hermitian_eigen(&sym);
            min_eig = min_eig.min(vals[0]);
            for i in 0..b.nrows() {
                min_pop = min_pop.min(b[(i, i)].re);
            }
        }
        DensityDiagnostics {
            trace_deviation: (self.trace() - 1.0).abs(),
            hermiticity_error: herm,
            min_eigenvalue: min_eig,
            min_population: min_pop,
        }
    }

    /// Fails if any of the density-matrix invariants is broken.
    pub fn check_physical(&self, t: f64) -> Result<DensityDiagnostics> {
        let d = self.diagnostics();
        let reason = if d.trace_deviation > TRACE_TOL {
            Some(format!("trace deviates from 1 by {:e}", d.trace_deviation))
        } else if d.hermiticity_error > HERMITIAN_TOL {
            Some(format!("hermiticity error {:e}", d.hermiticity_error))
        } else if d.min_population < -POPULATION_TOL {
            Some(format!("negative population {:e}", d.min_population))
        } else if d.min_eigenvalue < -EIGEN_TOL {
            Some(format!("negative eigenvalue {:e}", d.min_eigenvalue))
        } else {
            None
        };
        match reason {
            Some(reason) => Err(Error::Physicality { t, reason }),
            None => Ok(d),
        }
    }

    fn pack(&self) -> Vec<f64> {
        let mut y = Vec::with_capacity(2 * packed_len(self.n_max));
        for b in &self.blocks {
            for z in b.iter() {
                y.push(z.re);
                y.push(z.im);
            }
        }
        y
    }

    fn unpack(n_max: usize, y: &[f64]) -> Self {
        let mut blocks = Vec::with_capacity(n_max + 1);
        let mut off = 0;
        for n in 0..=n_max {
            let len = (n + 1) * (n + 1);
            blocks.push(block_from_slice(n + 1, &y[2 * off..2 * (off + len)]));
            off += len;
        }
        TwoModeFockDensity { n_max, blocks }
    }

    /// Schwinger-spin moments of the state.
    pub fn moments(&self, t: f64, sectors: &[SectorOps]) -> MomentRow {
        let mut l0 = 0.0;
        let mut lx = 0.0;
        let mut ly = 0.0;
        let mut lz = 0.0;
        let mut xx = 0.0;
        let mut yy = 0.0;
        let mut spin_sq = 0.0;
        for (b, ops) in self.blocks.iter().zip(sectors) {
            let p = b.trace().re;
            if p == 0.0 && b.iter().all(|z| *z == Complex64::new(0.0, 0.0)) {
                continue;
            }
            let n = ops.n as f64;
            l0 += n * p;
            lx += trace_product(b, &ops.lx);
            ly += trace_product(b, &ops.ly);
            lz += trace_product(b, &ops.lz);
            xx += trace_product(b, &ops.lx_sq);
            yy += trace_product(b, &ops.ly_sq);
            spin_sq += p * 0.5 * n * (0.5 * n + 1.0);
        }
        MomentRow {
            t,
            l0,
            lx,
            ly,
            lz,
            dxx: 2.0 * (xx - lx * lx),
            dyy: 2.0 * (yy - ly * ly),
            spin_sq,
        }
    }
}

fn packed_len(n_max: usize) -> usize {
    (0..=n_max).map(|n| (n + 1) * (n + 1)).sum()
}

fn block_from_slice(dim: usize, y: &[f64]) -> CMatrix {
    CMatrix::from_iterator(
        dim,
        dim,
        y.chunks_exact(2).map(|c| Complex64::new(c[0], c[1])),
    )
}

/// `Re Tr(rho A)` for Hermitian `A`.
fn trace_product(rho: &CMatrix, a: &CMatrix) -> f64 {
    let mut s = 0.0;
    for j in 0..rho.ncols() {
        for i in 0..rho.nrows() {
            s += (rho[(i, j)] * a[(j, i)]).re;
        }
    }
    s
}

/// Operators restricted to the sector of total number `n`, basis `n1 = 0..=n`.
#[derive(Debug, Clone)]
pub struct SectorOps {
    pub n: usize,
    pub lx: CMatrix,
    pub ly: CMatrix,
    pub lz: CMatrix,
    pub lx_sq: CMatrix,
    pub ly_sq: CMatrix,
    /// `-i H - ½ sum_k 2 gamma_k n_k`.
    drift: CMatrix,
    /// `sqrt(2 gamma1) a1` and `sqrt(2 gamma2) a2` from sector `n + 1` into `n`.
    jump1: CMatrix,
    jump2: CMatrix,
}

impl SectorOps {
    fn new(n: usize, params: &TwistParams) -> Self {
        let dim = n + 1;
        let mut lp = CMatrix::zeros(dim, dim);
        let mut lz = CMatrix::zeros(dim, dim);
        let mut damp = CMatrix::zeros(dim, dim);
        for k in 0..dim {
            let (n1, n2) = (k as f64, (n - k) as f64);
            lz[(k, k)] = Complex64::new(0.5 * (n2 - n1), 0.0);
            damp[(k, k)] = Complex64::new(params.gamma1 * n1 + params.gamma2 * n2, 0.0);
            if k >= 1 {
                // a2† a1 |n1, n2> = sqrt(n1 (n2 + 1)) |n1 - 1, n2 + 1>
                lp[(k - 1, k)] = Complex64::new((n1 * (n2 + 1.0)).sqrt(), 0.0);
            }
        }
        let lm = lp.adjoint();
        let lx = (&lp + &lm).scale(0.5);
        let ly = (&lp - &lm) * Complex64::new(0.0, -0.5);
        let lp2 = &lp * &lp;
        let lm2 = &lm * &lm;
        // H = -i chi/2 (L+² - L-²), so -iH = -chi/2 (L+² - L-²).
        let drift = (lp2 - lm2).scale(-0.5 * params.chi) - damp;

        let src = dim + 1;
        let mut jump1 = CMatrix::zeros(dim, src);
        let mut jump2 = CMatrix::zeros(dim, src);
        let (s1, s2) = ((2.0 * params.gamma1).sqrt(), (2.0 * params.gamma2).sqrt());
        for k in 0..src {
            let (n1, n2) = (k, n + 1 - k);
            if n1 >= 1 {
                jump1[(k - 1, k)] = Complex64::new(s1 * (n1 as f64).sqrt(), 0.0);
            }
            if n2 >= 1 {
                jump2[(k, k)] = Complex64::new(s2 * (n2 as f64).sqrt(), 0.0);
            }
        }
        SectorOps {
            n,
            lx_sq: &lx * &lx,
            ly_sq: &ly * &ly,
            lx,
            ly,
            lz,
            drift,
            jump1,
            jump2,
        }
    }
}

/// Per-sector operators for all `n <= params.n_atoms`.
pub fn sector_operators(params: &TwistParams) -> Vec<SectorOps> {
    (0..=params.n_atoms)
        .map(|n| SectorOps::new(n, params))
        .collect()
}

/// Right-hand side of the Lindblad equation on the packed block vector.
pub fn master_rhs(sectors: &[SectorOps], y: &[f64], dy: &mut [f64]) {
    let n_max = sectors.len() - 1;
    let mut off = 0;
    let mut upper: Option<CMatrix> = None;
    let mut offsets = Vec::with_capacity(n_max + 1);
    for n in 0..=n_max {
        offsets.push(off);
        off += (n + 1) * (n + 1);
    }
    // Walk from the top sector down so the block feeding sector n is at hand.
    for n in (0..=n_max).rev() {
        let dim = n + 1;
        let start = offsets[n];
        let rho = block_from_slice(dim, &y[2 * start..2 * (start + dim * dim)]);
        let m = &sectors[n].drift * &rho;
        let mut d = &m + m.adjoint();
        if let Some(r_up) = upper.as_ref() {
            let ops = &sectors[n];
            d += &ops.jump1 * r_up * ops.jump1.adjoint();
            d += &ops.jump2 * r_up * ops.jump2.adjoint();
        }
        for (i, z) in d.iter().enumerate() {
            dy[2 * (start + i)] = z.re;
            dy[2 * (start + i) + 1] = z.im;
        }
        upper = Some(rho);
    }
}

fn validate_times(t_grid: &[f64]) -> Result<()> {
    validate_grid("t_grid", t_grid)?;
    if t_grid[0] < 0.0 {
        return Err(Error::invalid("t_grid", "times must be >= 0"));
    }
    Ok(())
}

/// Prepends `t = 0` when the grid starts later; returns the grid and how
/// many leading entries to drop from the output.
fn anchored(t_grid: &[f64]) -> (Vec<f64>, usize) {
    if t_grid[0] > 0.0 {
        let mut g = Vec::with_capacity(t_grid.len() + 1);
        g.push(0.0);
        g.extend_from_slice(t_grid);
        (g, 1)
    } else {
        (t_grid.to_vec(), 0)
    }
}

/// Counter-twisting Hamiltonian in the Dicke basis, `-i chi/2 (J+² - J-²)`.
pub fn twist_hamiltonian(ops: &SpinOperators, chi: f64) -> CMatrix {
    let jp2 = &ops.jp * &ops.jp;
    let jm2 = &ops.jm * &ops.jm;
    (jp2 - jm2) * Complex64::new(0.0, -0.5 * chi)
}

/// Lossless evolution of `|J, -J>` by exact diagonalization.
///
/// `chi` may be negative; the sign flip exchanges the squeezed and
/// anti-squeezed quadratures.
pub fn evolve_unitary(n_atoms: usize, chi: f64, t_grid: &[f64]) -> Result<MomentTrajectory> {
    if n_atoms < 2 || !n_atoms.is_multiple_of(2) {
        return Err(Error::invalid(
            "N",
            "unitary evolution needs an even N >= 2",
        ));
    }
    if !chi.is_finite() {
        return Err(Error::invalid("chi", "must be finite"));
    }
    validate_times(t_grid)?;
    let ops = SpinOperators::new(n_atoms)?;
    let h = twist_hamiltonian(&ops, chi);
    let (energies, vecs) = hermitian_eigen(&h);
    let psi0 = bloch_ground_state(n_atoms)?;
    let coeffs = vecs.adjoint() * psi0.amplitudes();
    let j = ops.spin_length();
    let n = n_atoms as f64;

    let mut rows = Vec::with_capacity(t_grid.len());
    for &t in t_grid {
        let phased = DVector::from_iterator(
            coeffs.len(),
            coeffs
                .iter()
                .zip(&energies)
                .map(|(c, e)| c * Complex64::from_polar(1.0, -e * t)),
        );
        let amps = &vecs * phased;
        let norm_dev = (amps.norm_squared() - 1.0).abs();
        if norm_dev > NORM_TOL {
            return Err(Error::Physicality {
                t,
                reason: format!("norm drift {norm_dev:e}"),
            });
        }
        let state = DickeState::from_amplitudes(amps)?;
        let m = crate::dicke::moments(&state, &ops)?;
        rows.push(MomentRow {
            t,
            l0: n,
            lx: m.mean_x,
            ly: m.mean_y,
            lz: m.mean_z,
            dxx: 2.0 * m.var_x,
            dyy: 2.0 * m.var_y,
            spin_sq: m.var_x
                + m.var_y
                + m.var_z
                + m.mean_x.powi(2)
                + m.mean_y.powi(2)
                + m.mean_z.powi(2),
        });
        debug_assert!((rows.last().unwrap().spin_sq - j * (j + 1.0)).abs() < 1e-6 * (1.0 + j * j));
    }
    Ok(MomentTrajectory { n_atoms, rows })
}

/// Output of [`evolve_master_with_states`].
#[derive(Debug, Clone)]
pub struct MasterRun {
    pub trajectory: MomentTrajectory,
    pub states: Vec<TwoModeFockDensity>,
    pub diagnostics: Vec<DensityDiagnostics>,
}

/// Lindblad evolution of `|N, 0>` returning moments only.
pub fn evolve_master(params: &TwistParams, t_grid: &[f64]) -> Result<MomentTrajectory> {
    evolve_master_with_states(params, t_grid, false).map(|r| r.trajectory)
}

/// Lindblad evolution of `|N, 0>`; density matrices are kept when
/// `keep_states` is set. Every output time passes [`TwoModeFockDensity::check_physical`].
pub fn evolve_master_with_states(
    params: &TwistParams,
    t_grid: &[f64],
    keep_states: bool,
) -> Result<MasterRun> {
    params.validate()?;
    if params.n_atoms > MAX_MASTER_ATOMS {
        return Err(Error::ResourceLimit(format!(
            "master equation limited to N <= {MAX_MASTER_ATOMS} (requested {})",
            params.n_atoms
        )));
    }
    validate_times(t_grid)?;
    let (grid, skip) = anchored(t_grid);
    let sectors = sector_operators(params);
    let rho0 = TwoModeFockDensity::all_in_mode_one(params.n_atoms);
    let solver = Rk45::with_tolerances(MASTER_ATOL, MASTER_RTOL);
    let ys = solver.integrate(|_, y, dy| master_rhs(&sectors, y, dy), &rho0.pack(), &grid)?;

    let mut rows = Vec::with_capacity(t_grid.len());
    let mut states = Vec::new();
    let mut diagnostics = Vec::with_capacity(t_grid.len());
    for (&t, y) in grid.iter().zip(&ys).skip(skip) {
        let rho = TwoModeFockDensity::unpack(params.n_atoms, y);
        diagnostics.push(rho.check_physical(t)?);
        rows.push(rho.moments(t, &sectors));
        if keep_states {
            states.push(rho);
        }
    }
    Ok(MasterRun {
        trajectory: MomentTrajectory {
            n_atoms: params.n_atoms,
            rows,
        },
        states,
        diagnostics,
    })
}

/// Vertex of the parabola through three points, or the middle point when
/// they are collinear.
pub(crate) fn parabola_vertex(x: [f64; 3], y: [f64; 3]) -> (f64, f64) {
    let d1 = (y[1] - y[0]) / (x[1] - x[0]);
    let d2 = (y[2] - y[1]) / (x[2] - x[1]);
    let a = (d2 - d1) / (x[2] - x[0]);
    if a.is_nan() || a <= 0.0 {
        return (x[1], y[1]);
    }
    let b = d1 - a * (x[0] + x[1]);
    let c = y[0] - a * x[0] * x[0] - b * x[0];
    let xv = (-b / (2.0 * a)).clamp(x[0], x[2]);
    (xv, a * xv * xv + b * xv + c)
}

/// Interior index of the smallest sample, if it is not at either end.
pub(crate) fn interior_argmin(ys: &[f64]) -> Result<usize> {
    let (idx, _) =
        ys.iter().enumerate().fold(
            (0, f64::INFINITY),
            |acc, (i, &y)| if y < acc.1 { (i, y) } else { acc },
        );
    if idx == 0 || idx + 1 >= ys.len() {
        return Err(Error::NoInteriorMinimum);
    }
    Ok(idx)
}

/// Time and value of the squeezing minimum, `delta_xx = D_xx / N`, refined by
/// a quadratic fit through the grid minimum and its neighbours.
pub fn find_min_variance(traj: &MomentTrajectory) -> Result<(f64, f64)> {
    let ys = traj.scaled_dxx();
    let i = interior_argmin(&ys)?;
    let ts = traj.times();
    Ok(parabola_vertex(
        [ts[i - 1], ts[i], ts[i + 1]],
        [ys[i - 1], ys[i], ys[i + 1]],
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
        (0..n)
            .map(|k| a + (b - a) * k as f64 / (n - 1) as f64)
            .collect()
    }

    #[test]
    fn basis_order_and_index_agree() {
        let basis = fock_basis(4);
        assert_eq!(basis.len(), 15);
        for (i, &(n1, n2)) in basis.iter().enumerate() {
            assert_eq!(fock_index(n1, n2), i);
        }
        assert_eq!(basis[0], (0, 0));
        assert_eq!(basis[1], (0, 1));
        assert_eq!(basis[2], (1, 0));
    }

    #[test]
    fn initial_moments() {
        let traj = evolve_unitary(20, 1.0, &[0.0]).unwrap();
        let r = traj.rows[0];
        assert_abs_diff_eq!(r.dxx, 10.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r.dyy, 10.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r.lz, -10.0, epsilon = 1e-12);

        let p = TwistParams::symmetric(6, 1.0, 0.1).unwrap();
        let m = evolve_master(&p, &[0.0]).unwrap().rows[0];
        assert_abs_diff_eq!(m.dxx, 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(m.lz, -3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(m.l0, 6.0, epsilon = 1e-12);
    }

    #[test]
    fn zero_chi_freezes_moments() {
        let grid = linspace(0.0, 3.0, 7);
        let traj = evolve_unitary(8, 0.0, &grid).unwrap();
        for r in &traj.rows {
            assert_abs_diff_eq!(r.dxx, 4.0, epsilon = 1e-12);
            assert_abs_diff_eq!(r.lz, -4.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn master_without_loss_matches_unitary() {
        let grid = linspace(0.0, 0.15, 16);
        let u = evolve_unitary(10, 1.0, &grid).unwrap();
        let p = TwistParams::symmetric(10, 1.0, 0.0).unwrap();
        let m = evolve_master(&p, &grid).unwrap();
        for (a, b) in u.rows.iter().zip(&m.rows) {
            assert_abs_diff_eq!(a.dxx, b.dxx, epsilon = 1e-6);
            assert_abs_diff_eq!(a.dyy, b.dyy, epsilon = 1e-6);
            assert_abs_diff_eq!(a.lz, b.lz, epsilon = 1e-6);
        }
    }

    #[test]
    fn pure_loss_decays_number() {
        let grid = linspace(0.0, 2.0, 9);
        let p = TwistParams::symmetric(8, 0.0, 0.3).unwrap();
        let traj = evolve_master(&p, &grid).unwrap();
        for r in &traj.rows {
            let expect = 8.0 * (-0.6 * r.t).exp();
            assert!(
                (r.l0 - expect).abs() < 1e-7 * 8.0,
                "t={} {} {}",
                r.t,
                r.l0,
                expect
            );
        }
    }

    #[test]
    fn grid_may_start_after_zero() {
        let p = TwistParams::symmetric(4, 1.0, 0.1).unwrap();
        let full = evolve_master(&p, &[0.0, 0.2, 0.4]).unwrap();
        let late = evolve_master(&p, &[0.2, 0.4]).unwrap();
        assert_eq!(late.rows.len(), 2);
        assert_abs_diff_eq!(full.rows[2].dxx, late.rows[1].dxx, epsilon = 1e-8);
    }

    #[test]
    fn master_guards() {
        let p = TwistParams::symmetric(31, 1.0, 0.1).unwrap();
        assert!(matches!(
            evolve_master(&p, &[0.0]),
            Err(Error::ResourceLimit(_))
        ));
        assert!(TwistParams::new(4, -1.0, 0.0, 0.0).is_err());
        assert!(TwistParams::new(4, 1.0, -0.1, 0.0).is_err());
        assert!(evolve_unitary(5, 1.0, &[0.0]).is_err());
        assert!(evolve_unitary(4, 1.0, &[0.1, 0.0]).is_err());
    }

    #[test]
    fn quadratic_refinement() {
        let (x, y) = parabola_vertex([0.0, 1.0, 2.0], [1.0, 0.0, 1.0]);
        assert_abs_diff_eq!(x, 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(y, 0.0, epsilon = 1e-14);
        let (x, y) = parabola_vertex([0.0, 1.0, 3.0], [4.0, 1.0, 1.0]);
        // y = (x - 2)^2
        assert_abs_diff_eq!(x, 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(y, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn monotone_trajectory_has_no_minimum() {
        let grid = linspace(0.0, 0.05, 6);
        let traj = evolve_unitary(20, 1.0, &grid).unwrap();
        assert!(matches!(
            find_min_variance(&traj),
            Err(Error::NoInteriorMinimum)
        ));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn unitary_conserves_total_spin(half in 1usize..11, chi in -2.0f64..2.0, t_end in 0.1f64..3.0) {
            let n = 2 * half;
            let j = half as f64;
            let traj = evolve_unitary(n, chi, &linspace(0.0, t_end, 9)).unwrap();
            for r in &traj.rows {
                prop_assert!((r.spin_sq - j * (j + 1.0)).abs() < 1e-8);
            }
        }

        #[test]
        fn sign_flip_exchanges_quadratures(half in 1usize..7, chi in 0.1f64..2.0) {
            let grid = linspace(0.0, 2.0, 11);
            let plus = evolve_unitary(2 * half, chi, &grid).unwrap();
            let minus = evolve_unitary(2 * half, -chi, &grid).unwrap();
            for (p, m) in plus.rows.iter().zip(&minus.rows) {
                prop_assert!((p.dyy - m.dxx).abs() < 1e-9 * p.dyy.max(1.0));
            }
        }

        #[test]
        fn master_stays_physical(
            n in 1usize..9,
            chi in 0.0f64..2.0,
            g1 in 0.0f64..0.5,
            g2 in 0.0f64..0.5,
        ) {
            let p = TwistParams::new(n, chi, g1, g2).unwrap();
            let run = evolve_master_with_states(&p, &linspace(0.0, 1.5, 7), false).unwrap();
            for d in &run.diagnostics {
                prop_assert!(d.trace_deviation < 1e-8);
                prop_assert!(d.hermiticity_error < 1e-10);
                prop_assert!(d.min_population >= -1e-9);
            }
            for r in &run.trajectory.rows {
                prop_assert!(r.lx.abs() < 1e-9 && r.ly.abs() < 1e-9);
            }
        }
    }
}
