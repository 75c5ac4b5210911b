// SPDX-License-Identifier: Apache-2.0

//! Spin Wigner function from the multipole expansion
//! `rho = sum_kq rho_kq T_kq`, `W(theta, phi) = sum_kq rho_kq Y_k^q(theta, phi)`.
//!
//! Conventions:
//! * `T_kq(m, m') = (-1)^(J-m) sqrt(2k+1) (J k J; -m q m')`, so that
//!   `Tr[T_kq T_k'q'†] = δ_kk' δ_qq'`.
//! * `rho_kq = Tr[rho T_kq†]`, which makes `W` real for Hermitian `rho`.
//! * `Y_k^q` carries the Condon–Shortley phase.

use std::cell::RefCell;
use std::f64::consts::PI;

use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dicke::{CMatrix, DickeState};
use crate::error::{Error, Result};

const STATE_TOL: f64 = 1e-9;

fn twice(name: &'static str, x: f64) -> Result<i64> {
    let t = 2.0 * x;
    let r = t.round();
    if !x.is_finite() || (t - r).abs() > 1e-9 {
        return Err(Error::invalid(name, "must be an integer or half-integer"));
    }
    Ok(r as i64)
}

thread_local! {
    static FACTORIALS: RefCell<Vec<BigInt>> = RefCell::new(vec![BigInt::one()]);
}

fn factorial(n: i64) -> BigInt {
    debug_assert!(n >= 0);
    let n = n as usize;
    FACTORIALS.with(|f| {
        let mut f = f.borrow_mut();
        while f.len() <= n {
            let k = f.len();
            let next = &f[k - 1] * BigInt::from(k);
            f.push(next);
        }
        f[n].clone()
    })
}

fn binomial(n: i64, k: i64) -> BigInt {
    if k < 0 || k > n {
        return BigInt::zero();
    }
    factorial(n) / (factorial(k) * factorial(n - k))
}

/// Wigner 3j symbol with all arguments given as twice their value.
///
/// Evaluated exactly: the alternating sum is an integer, and the square of
/// the symbol is formed as a rational number before the final square root.
pub fn wigner3j_doubled(tj1: i64, tj2: i64, tj3: i64, tm1: i64, tm2: i64, tm3: i64) -> f64 {
    if tj1 < 0 || tj2 < 0 || tj3 < 0 {
        return 0.0;
    }
    if tm1.abs() > tj1 || tm2.abs() > tj2 || tm3.abs() > tj3 {
        return 0.0;
    }
    if (tj1 + tm1) % 2 != 0 || (tj2 + tm2) % 2 != 0 || (tj3 + tm3) % 2 != 0 {
        return 0.0;
    }
    if tm1 + tm2 + tm3 != 0 || (tj1 + tj2 + tj3) % 2 != 0 {
        return 0.0;
    }
    // Triangle combinations (as plain integers).
    let a = (tj1 + tj2 - tj3) / 2;
    let b = (tj1 - tj2 + tj3) / 2;
    let c = (-tj1 + tj2 + tj3) / 2;
    if a < 0 || b < 0 || c < 0 {
        return 0.0;
    }
    let big_j = (tj1 + tj2 + tj3) / 2;
    let j1_minus_m1 = (tj1 - tm1) / 2;
    let j2_plus_m2 = (tj2 + tm2) / 2;

    let mut sum = BigInt::zero();
    for k in 0..=a {
        let term = binomial(a, k) * binomial(b, j1_minus_m1 - k) * binomial(c, j2_plus_m2 - k);
        if k % 2 == 0 {
            sum += term;
        } else {
            sum -= term;
        }
    }
    if sum.is_zero() {
        return 0.0;
    }
    let num = [
        tj1 + tm1,
        tj1 - tm1,
        tj2 + tm2,
        tj2 - tm2,
        tj3 + tm3,
        tj3 - tm3,
    ]
    .iter()
    .fold(BigInt::one(), |acc, &x| acc * factorial(x / 2));
    let den = factorial(a) * factorial(b) * factorial(c) * factorial(big_j + 1);
    let square = BigRational::new(&sum * &sum * num, den);
    let magnitude = square.to_f64().unwrap_or(f64::NAN).sqrt();
    let phase_exp = (tj1 - tj2 - tm3) / 2;
    let sign = if phase_exp.rem_euclid(2) == 0 {
        1.0
    } else {
        -1.0
    };
    let sign = if sum.is_negative() { -sign } else { sign };
    sign * magnitude
}

/// Wigner 3j symbol `(j1 j2 j3; m1 m2 m3)`.
pub fn wigner3j(j1: f64, j2: f64, j3: f64, m1: f64, m2: f64, m3: f64) -> Result<f64> {
    let tj = [twice("j1", j1)?, twice("j2", j2)?, twice("j3", j3)?];
    let tm = [twice("m1", m1)?, twice("m2", m2)?, twice("m3", m3)?];
    for (name, t) in [("j1", tj[0]), ("j2", tj[1]), ("j3", tj[2])] {
        if t < 0 {
            return Err(Error::invalid(name, "must be >= 0"));
        }
    }
    for (i, name) in ["m1", "m2", "m3"].into_iter().enumerate() {
        if tm[i].abs() > tj[i] {
            return Err(Error::invalid(name, "|m| must not exceed j"));
        }
        if (tj[i] + tm[i]) % 2 != 0 {
            return Err(Error::invalid(name, "j - m must be an integer"));
        }
    }
    Ok(wigner3j_doubled(tj[0], tj[1], tj[2], tm[0], tm[1], tm[2]))
}

/// Flat index of `(k, q)` in coefficient arrays: `k² + k + q`.
pub fn kq_index(k: usize, q: i64) -> usize {
    ((k * k + k) as i64 + q) as usize
}

/// Nonzero entries of one multipole operator; `T_kq` only connects
/// `m' = m - q`.
#[derive(Debug, Clone)]
struct MultipoleOp {
    /// `(row index i = m + J, column index i', value)`.
    entries: Vec<(usize, usize, f64)>,
}

/// All `T_kq` for a spin `J = two_j / 2`.
#[derive(Debug, Clone)]
pub struct MultipoleBasis {
    two_j: usize,
    ops: Vec<MultipoleOp>,
}

impl MultipoleBasis {
    pub fn new(two_j: usize) -> Self {
        let tj = two_j as i64;
        let dim = two_j + 1;
        let kmax = two_j;
        let mut ops = Vec::with_capacity((kmax + 1) * (kmax + 1));
        for k in 0..=kmax {
            let tk = 2 * k as i64;
            let norm = ((2 * k + 1) as f64).sqrt();
            for q in -(k as i64)..=(k as i64) {
                let mut entries = Vec::new();
                for i in 0..dim {
                    let ip = i as i64 - q;
                    if ip < 0 || ip >= dim as i64 {
                        continue;
                    }
                    // doubled m = 2i - 2J
                    let tm = 2 * i as i64 - tj;
                    let tmp = 2 * ip - tj;
                    let w = wigner3j_doubled(tj, tk, tj, -tm, 2 * q, tmp);
                    if w == 0.0 {
                        continue;
                    }
                    let phase = if ((tj - tm) / 2) % 2 == 0 { 1.0 } else { -1.0 };
                    entries.push((i, ip as usize, phase * norm * w));
                }
                ops.push(MultipoleOp { entries });
            }
        }
        MultipoleBasis { two_j, ops }
    }

    pub fn two_j(&self) -> usize {
        self.two_j
    }

    /// Dense `T_kq`.
    pub fn operator(&self, k: usize, q: i64) -> Result<CMatrix> {
        check_kq(k, q, self.two_j)?;
        let dim = self.two_j + 1;
        let mut t = CMatrix::zeros(dim, dim);
        for &(i, j, v) in &self.ops[kq_index(k, q)].entries {
            t[(i, j)] = Complex64::new(v, 0.0);
        }
        Ok(t)
    }
}

fn check_kq(k: usize, q: i64, two_j: usize) -> Result<()> {
    if k > two_j {
        return Err(Error::invalid("k", "must not exceed 2J"));
    }
    if q.unsigned_abs() as usize > k {
        return Err(Error::invalid("q", "|q| must not exceed k"));
    }
    Ok(())
}

/// Multipole coefficients `rho_kq`, `k = 0..=2J`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultipoleDecomposition {
    pub two_j: usize,
    /// Indexed by [`kq_index`].
    pub coeffs: Vec<Complex64>,
}

impl MultipoleDecomposition {
    pub fn spin_length(&self) -> f64 {
        self.two_j as f64 / 2.0
    }

    pub fn kmax(&self) -> usize {
        self.two_j
    }

    pub fn get(&self, k: usize, q: i64) -> Complex64 {
        self.coeffs[kq_index(k, q)]
    }

    /// Largest `|rho_{k,-q} - (-1)^q conj(rho_kq)|`.
    pub fn conjugation_residual(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for k in 0..=self.kmax() {
            for q in 0..=(k as i64) {
                let sign = if q % 2 == 0 { 1.0 } else { -1.0 };
                let d = self.get(k, -q) - self.get(k, q).conj() * sign;
                worst = worst.max(d.norm());
            }
        }
        worst
    }

    /// `sum_kq rho_kq T_kq`.
    pub fn reconstruct(&self, basis: &MultipoleBasis) -> Result<CMatrix> {
        if basis.two_j != self.two_j {
            return Err(Error::invalid("basis", "spin length does not match"));
        }
        let dim = self.two_j + 1;
        let mut rho = CMatrix::zeros(dim, dim);
        for (op, c) in basis.ops.iter().zip(&self.coeffs) {
            for &(i, j, v) in &op.entries {
                rho[(i, j)] += c * v;
            }
        }
        Ok(rho)
    }
}

/// `rho_kq = Tr[rho T_kq†]` for a trace-one Hermitian density matrix.
pub fn multipole_coeffs(rho: &CMatrix, basis: &MultipoleBasis) -> Result<MultipoleDecomposition> {
    let dim = basis.two_j + 1;
    if rho.shape() != (dim, dim) {
        return Err(Error::invalid(
            "rho",
            format!("expected a {dim}x{dim} matrix"),
        ));
    }
    let herm = (rho - rho.adjoint())
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max);
    if herm > STATE_TOL {
        return Err(Error::invalid(
            "rho",
            format!("not Hermitian (residual {herm:e})"),
        ));
    }
    let tr = rho.trace();
    if (tr - Complex64::new(1.0, 0.0)).norm() > STATE_TOL {
        return Err(Error::invalid("rho", format!("trace {tr} != 1")));
    }
    let coeffs = basis
        .ops
        .iter()
        .map(|op| {
            // T is real, so Tr[rho T†] = sum_ij rho_ij T_ij.
            op.entries
                .iter()
                .fold(Complex64::new(0.0, 0.0), |acc, &(i, j, v)| {
                    acc + rho[(i, j)] * v
                })
        })
        .collect();
    Ok(MultipoleDecomposition {
        two_j: basis.two_j,
        coeffs,
    })
}

/// Pure-state convenience wrapper.
pub fn multipole_coeffs_pure(
    state: &DickeState,
    basis: &MultipoleBasis,
) -> Result<MultipoleDecomposition> {
    multipole_coeffs(&state.density_matrix(), basis)
}

/// Normalized associated Legendre values `Pbar_k^q(cos theta)` for
/// `0 <= q <= k <= kmax`, such that `Y_k^q = Pbar_k^q e^{i q phi}`
/// (Condon–Shortley phase included). Indexed by [`kq_index`] with `q >= 0`.
pub fn normalized_legendre(kmax: usize, theta: f64) -> Vec<f64> {
    let x = theta.cos();
    let s = theta.sin();
    let mut p = vec![0.0; (kmax + 1) * (kmax + 1)];
    // Pbar_0^0 = 1/sqrt(4 pi)
    let mut pmm = (1.0 / (4.0 * PI)).sqrt();
    for m in 0..=kmax {
        if m > 0 {
            let mf = m as f64;
            pmm *= -((2.0 * mf + 1.0) / (2.0 * mf)).sqrt() * s;
        }
        p[kq_index(m, m as i64)] = pmm;
        if m < kmax {
            let v = (2.0 * m as f64 + 3.0).sqrt() * x * pmm;
            p[kq_index(m + 1, m as i64)] = v;
        }
        for l in (m + 2)..=kmax {
            let (lf, mf) = (l as f64, m as f64);
            let a = ((4.0 * lf * lf - 1.0) / (lf * lf - mf * mf)).sqrt();
            let b = (((lf - 1.0) * (lf - 1.0) - mf * mf) / (4.0 * (lf - 1.0) * (lf - 1.0) - 1.0))
                .sqrt();
            let v = a * (x * p[kq_index(l - 1, m as i64)] - b * p[kq_index(l - 2, m as i64)]);
            p[kq_index(l, m as i64)] = v;
        }
    }
    p
}

/// Spherical harmonic `Y_k^q(theta, phi)` with the Condon–Shortley phase.
pub fn spherical_harmonic(k: usize, q: i64, theta: f64, phi: f64) -> Result<Complex64> {
    if q.unsigned_abs() as usize > k {
        return Err(Error::invalid("q", "|q| must not exceed k"));
    }
    let p = normalized_legendre(k, theta)[kq_index(k, q.abs())];
    let y = Complex64::from_polar(p, q.abs() as f64 * phi);
    Ok(if q >= 0 {
        y
    } else if q % 2 == 0 {
        y.conj()
    } else {
        -y.conj()
    })
}

/// `W` sampled on a `theta x phi` grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SphericalGrid {
    pub thetas: Vec<f64>,
    pub phis: Vec<f64>,
    /// `values[i][j] = W(thetas[i], phis[j])`.
    pub values: Vec<Vec<f64>>,
    /// Largest imaginary part discarded when forming `values`.
    pub max_imag: f64,
}

fn wigner_row(decomp: &MultipoleDecomposition, theta: f64, phis: &[f64]) -> (Vec<f64>, f64) {
    let kmax = decomp.kmax();
    let p = normalized_legendre(kmax, theta);
    let mut row = Vec::with_capacity(phis.len());
    let mut max_imag: f64 = 0.0;
    for &phi in phis {
        let mut w = Complex64::new(0.0, 0.0);
        for k in 0..=kmax {
            for q in -(k as i64)..=(k as i64) {
                let pk = p[kq_index(k, q.abs())];
                let base = Complex64::from_polar(pk, q.abs() as f64 * phi);
                let y = if q >= 0 {
                    base
                } else if q % 2 == 0 {
                    base.conj()
                } else {
                    -base.conj()
                };
                w += decomp.get(k, q) * y;
            }
        }
        max_imag = max_imag.max(w.im.abs());
        row.push(w.re);
    }
    (row, max_imag)
}

/// Evaluates `W(theta, phi)`; rows are computed in parallel.
pub fn wigner_map(
    decomp: &MultipoleDecomposition,
    thetas: &[f64],
    phis: &[f64],
) -> Result<SphericalGrid> {
    if thetas.is_empty() {
        return Err(Error::EmptyGrid("thetas"));
    }
    if phis.is_empty() {
        return Err(Error::EmptyGrid("phis"));
    }
    let rows: Vec<(Vec<f64>, f64)> = thetas
        .par_iter()
        .map(|&theta| wigner_row(decomp, theta, phis))
        .collect();
    let max_imag = rows.iter().map(|r| r.1).fold(0.0, f64::max);
    Ok(SphericalGrid {
        thetas: thetas.to_vec(),
        phis: phis.to_vec(),
        values: rows.into_iter().map(|r| r.0).collect(),
        max_imag,
    })
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 0 {
                1.0
            } else if n == 1 {
                z
            } else {
                p1
            };
            let pn1 = if n == 1 { 1.0 } else { p0 };
            dp = nf * (z * pn - pn1) / (z * z - 1.0);
            let dz = pn / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

/// Sphere quadrature: Gauss–Legendre in `cos theta`, trapezoid in `phi`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuadratureConfig {
    pub n_theta: usize,
    pub n_phi: usize,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        QuadratureConfig {
            n_theta: 64,
            n_phi: 128,
        }
    }
}

/// Sphere nodes `(theta, phi, weight)`.
pub fn sphere_nodes(cfg: &QuadratureConfig) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    if cfg.n_theta == 0 || cfg.n_phi == 0 {
        return Err(Error::invalid("n_theta", "quadrature sizes must be >= 1"));
    }
    let (x, w) = gauss_legendre(cfg.n_theta);
    // theta ascending: cos theta descending
    let thetas: Vec<f64> = x.iter().rev().map(|c| c.acos()).collect();
    let weights: Vec<f64> = w.iter().rev().copied().collect();
    let phis = (0..cfg.n_phi)
        .map(|j| 2.0 * PI * j as f64 / cfg.n_phi as f64)
        .collect();
    Ok((thetas, phis, weights))
}

/// `∫ W dΩ`; equals `sqrt(4π / (2J + 1))` for any trace-one state.
pub fn sphere_integral(decomp: &MultipoleDecomposition, cfg: &QuadratureConfig) -> Result<f64> {
    let (thetas, phis, weights) = sphere_nodes(cfg)?;
    let grid = wigner_map(decomp, &thetas, &phis)?;
    let dphi = 2.0 * PI / cfg.n_phi as f64;
    Ok(grid
        .values
        .iter()
        .zip(&weights)
        .map(|(row, w)| w * dphi * row.iter().sum::<f64>())
        .sum())
}
