// SPDX-License-Identifier: Apache-2.0

//! Test oracles that share no code with the library.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `sqrt(j(j+1) - m(m+1))`, the raising amplitude.
fn raise(j: f64, m: f64) -> f64 {
    (j * (j + 1.0) - m * (m + 1.0)).max(0.0).sqrt()
}

/// `sqrt(j(j+1) - m(m-1))`, the lowering amplitude.
fn lower(j: f64, m: f64) -> f64 {
    (j * (j + 1.0) - m * (m - 1.0)).max(0.0).sqrt()
}

/// Clebsch–Gordan coefficient `<j1 m1 j2 m2 | j m>`.
///
/// Builds `|j, j>` in the product basis from the condition `J+ |j, j> = 0`
/// (phase fixed by `<j1 j1 j2 j-j1 | j j> > 0`) and applies `J-` until
/// `M = m`.
pub fn clebsch_gordan(j1: f64, m1: f64, j2: f64, m2: f64, j: f64, m: f64) -> f64 {
    if (m1 + m2 - m).abs() > 1e-9 || j < (j1 - j2).abs() - 1e-9 || j > j1 + j2 + 1e-9 {
        return 0.0;
    }
    if m < 0.0 {
        // Fewer lowering steps from the mirrored projection.
        let e = (j1 + j2 - j).round() as i64;
        let sign = if e.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
        return sign * clebsch_gordan(j1, -m1, j2, -m2, j, -m);
    }
    let n1 = (2.0 * j1).round() as usize + 1;
    // vector over m1 = -j1 + i; m2 = M - m1
    let mut v = vec![0.0; n1];
    let m1_of = |i: usize| i as f64 - j1;
    let lo = (-j1).max(j - j2);
    let start = (lo + j1).round() as usize;
    v[start] = 1.0;
    for i in start + 1..n1 {
        let k = m1_of(i);
        if j - k < -j2 - 1e-9 {
            break;
        }
        // c(k) A1(k-1) ... coefficient of |k, j-k+1> in J+|psi> vanishes
        v[i] = -v[i - 1] * raise(j1, k - 1.0) / raise(j2, j - k);
    }
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let top = (j1 + j1).round() as usize;
    let sign = if v[top.min(n1 - 1)] < 0.0 { -1.0 } else { 1.0 };
    for x in &mut v {
        *x *= sign / norm;
    }
    let mut big_m = j;
    while big_m - m > 0.5 {
        let mut w = vec![0.0; n1];
        for (i, wi) in w.iter_mut().enumerate() {
            let a = m1_of(i);
            let b = big_m - 1.0 - a;
            if b.abs() > j2 + 1e-9 {
                continue;
            }
            let mut s = 0.0;
            if i + 1 < n1 {
                s += v[i + 1] * lower(j1, a + 1.0);
            }
            if (big_m - a).abs() <= j2 + 1e-9 {
                s += v[i] * lower(j2, big_m - a);
            }
            *wi = s;
        }
        let scale = lower(j, big_m);
        v = w.into_iter().map(|x| x / scale).collect();
        big_m -= 1.0;
    }
    let i = (m1 + j1).round() as usize;
    v[i]
}

/// 3j symbol from the Clebsch–Gordan oracle.
pub fn three_j(j1: f64, j2: f64, j3: f64, m1: f64, m2: f64, m3: f64) -> f64 {
    let e = (j1 - j2 - m3).round() as i64;
    let sign = if e.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
    sign / (2.0 * j3 + 1.0).sqrt() * clebsch_gordan(j1, m1, j2, m2, j3, -m3)
}

/// Random valid `(j1, j2, j3, m1, m2, m3)` with every `j <= jmax`.
pub fn random_triples(count: usize, jmax: f64, seed: u64) -> Vec<[f64; 6]> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tmax = (2.0 * jmax).round() as i64;
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let a = rng.gen_range(0..=tmax);
        let b = rng.gen_range(0..=tmax);
        let lo = (a - b).abs();
        let hi = (a + b).min(tmax);
        if lo > hi {
            continue;
        }
        let c = lo + 2 * rng.gen_range(0..=(hi - lo) / 2);
        let m1 = 2 * rng.gen_range(0..=a) - a;
        let m2 = 2 * rng.gen_range(0..=b) - b;
        let m3 = -m1 - m2;
        if m3.abs() > c {
            continue;
        }
        out.push([a, b, c, m1, m2, m3].map(|x| x as f64 / 2.0));
    }
    out
}
