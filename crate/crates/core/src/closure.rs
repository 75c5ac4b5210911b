// SPDX-License-Identifier: Apache-2.0

//! Second-order moment closure of the counter-twisting model with equal
//! loss on both modes.
//!
//! Two equivalent parameterizations are provided:
//!
//! * L-form: `(l0, lz, Dxx, Dyy)` in physical time with rates `chi`, `Gamma`.
//! * h-form: contracted variables `h0 = l0/N`, `hz = lz + l0/2`,
//!   `dxx = Dxx/N`, `dyy = Dyy/N` in `tau = N chi t`, with
//!   `kappa = Gamma/(N chi)` and `epsilon = 1/N`.
//!
//! `epsilon = 0` is accepted in the h-form as the bosonic limit.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ode::{validate_grid, Rk45};
use crate::twist::{evolve_master_with_states, interior_argmin, MomentRow, TwistParams};

const H0_SLACK: f64 = 1e-9;
const GOLDEN_TOL: f64 = 1e-9;

/// Raw closure variables.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LState {
    pub l0: f64,
    pub lz: f64,
    pub dxx: f64,
    pub dyy: f64,
}

/// Contracted closure variables.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContractedState {
    pub h0: f64,
    pub hz: f64,
    pub dxx: f64,
    pub dyy: f64,
}

impl ContractedState {
    /// All atoms in mode 1: `h0 = 1`, `hz = 0`, `dxx = dyy = ½`.
    pub fn initial() -> Self {
        ContractedState {
            h0: 1.0,
            hz: 0.0,
            dxx: 0.5,
            dyy: 0.5,
        }
    }

    pub fn check(&self, tau: f64) -> Result<()> {
        let ok = self.h0 >= 0.0
            && self.h0 <= 1.0 + H0_SLACK
            && self.dxx >= 0.0
            && self.dyy >= 0.0
            && self.hz.is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::Physicality {
                t: tau,
                reason: format!("contracted state out of range: {self:?}"),
            })
        }
    }

    pub fn to_l(&self, n_atoms: f64) -> LState {
        LState {
            l0: n_atoms * self.h0,
            lz: self.hz - 0.5 * n_atoms * self.h0,
            dxx: n_atoms * self.dxx,
            dyy: n_atoms * self.dyy,
        }
    }

    pub fn from_l(l: &LState, n_atoms: f64) -> Self {
        ContractedState {
            h0: l.l0 / n_atoms,
            hz: l.lz + 0.5 * l.l0,
            dxx: l.dxx / n_atoms,
            dyy: l.dyy / n_atoms,
        }
    }

    /// Contracted view of exact moments.
    pub fn from_moments(row: &MomentRow, n_atoms: usize) -> Self {
        let l = LState {
            l0: row.l0,
            lz: row.lz,
            dxx: row.dxx,
            dyy: row.dyy,
        };
        Self::from_l(&l, n_atoms as f64)
    }

    fn to_array(self) -> [f64; 4] {
        [self.h0, self.hz, self.dxx, self.dyy]
    }

    fn from_slice(y: &[f64]) -> Self {
        ContractedState {
            h0: y[0],
            hz: y[1],
            dxx: y[2],
            dyy: y[3],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Representation {
    LForm,
    HForm,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClosureConfig {
    pub epsilon: f64,
    pub kappa: f64,
    pub representation: Representation,
}

impl ClosureConfig {
    pub fn new(epsilon: f64, kappa: f64) -> Result<Self> {
        let c = ClosureConfig {
            epsilon,
            kappa,
            representation: Representation::HForm,
        };
        c.validate()?;
        Ok(c)
    }

    /// `epsilon = 1/N`, `kappa = Gamma / (N chi)`.
    pub fn from_physical(n_atoms: usize, chi: f64, gamma: f64) -> Result<Self> {
        if n_atoms == 0 {
            return Err(Error::invalid("N", "atom count must be at least 1"));
        }
        if !(chi.is_finite() && chi > 0.0) {
            return Err(Error::invalid("chi", "must be finite and > 0"));
        }
        let n = n_atoms as f64;
        Self::new(1.0 / n, gamma / (n * chi))
    }

    pub fn with_representation(mut self, representation: Representation) -> Self {
        self.representation = representation;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon.is_finite() && (0.0..=1.0).contains(&self.epsilon)) {
            return Err(Error::invalid("epsilon", "must lie in [0, 1]"));
        }
        if self.representation == Representation::LForm && self.epsilon == 0.0 {
            return Err(Error::invalid(
                "epsilon",
                "the L-form needs a finite N (epsilon > 0)",
            ));
        }
        if !(self.kappa.is_finite() && self.kappa >= 0.0) {
            return Err(Error::invalid("kappa", "must be finite and >= 0"));
        }
        Ok(())
    }

    /// True when both small parameters are at most 0.1, where the
    /// perturbative estimates are meant to hold.
    pub fn is_perturbative(&self) -> bool {
        self.kappa <= 0.1 && self.epsilon <= 0.1
    }
}

/// Time derivatives of the L-form variables.
pub fn derivs_l(s: &LState, chi: f64, gamma: f64) -> LState {
    LState {
        l0: -2.0 * gamma * s.l0,
        lz: -2.0 * gamma * s.lz - chi * (s.dxx - s.dyy),
        dxx: -4.0 * gamma * s.dxx + gamma * s.l0 + 4.0 * chi * s.lz * s.dxx,
        dyy: -4.0 * gamma * s.dyy + gamma * s.l0 - 4.0 * chi * s.lz * s.dyy,
    }
}

/// `tau` derivatives of the contracted variables.
pub fn derivs_h(s: &ContractedState, cfg: &ClosureConfig) -> ContractedState {
    let (k, e) = (cfg.kappa, cfg.epsilon);
    ContractedState {
        h0: -2.0 * k * s.h0,
        hz: -2.0 * k * s.hz - (s.dxx - s.dyy),
        dxx: -4.0 * k * s.dxx + k * s.h0 - 2.0 * s.h0 * s.dxx + 4.0 * e * s.hz * s.dxx,
        dyy: -4.0 * k * s.dyy + k * s.h0 + 2.0 * s.h0 * s.dyy - 4.0 * e * s.hz * s.dyy,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClosurePoint {
    pub tau: f64,
    pub state: ContractedState,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClosureTrajectory {
    pub config: ClosureConfig,
    pub points: Vec<ClosurePoint>,
}

impl ClosureTrajectory {
    pub fn taus(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.tau).collect()
    }

    pub fn dxx(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.state.dxx).collect()
    }

    /// `dxx / h0`: squeezing relative to the coherent level `h0 / 2` of the
    /// atoms still present.
    pub fn relative_dxx(&self) -> Vec<f64> {
        self.points
            .iter()
            .map(|p| p.state.dxx / p.state.h0)
            .collect()
    }
}

fn integrate_h_from(
    cfg: &ClosureConfig,
    start: ContractedState,
    tau_grid: &[f64],
) -> Result<Vec<ContractedState>> {
    let cfg = *cfg;
    let ys = Rk45::default().integrate(
        |_, y, dy| {
            let d = derivs_h(&ContractedState::from_slice(y), &cfg);
            dy.copy_from_slice(&d.to_array());
        },
        &start.to_array(),
        tau_grid,
    )?;
    Ok(ys.iter().map(|y| ContractedState::from_slice(y)).collect())
}

/// Integrates the L-form in physical time from the all-in-mode-1 state.
pub fn integrate_closure_l(
    n_atoms: usize,
    chi: f64,
    gamma: f64,
    t_grid: &[f64],
) -> Result<Vec<LState>> {
    if n_atoms == 0 {
        return Err(Error::invalid("N", "atom count must be at least 1"));
    }
    if !chi.is_finite() || !(gamma.is_finite() && gamma >= 0.0) {
        return Err(Error::invalid("gamma", "rates must be finite, gamma >= 0"));
    }
    let (grid, skip) = anchored("t_grid", t_grid)?;
    let n = n_atoms as f64;
    let y0 = [n, -0.5 * n, 0.5 * n, 0.5 * n];
    let ys = Rk45::default().integrate(
        |_, y, dy| {
            let s = LState {
                l0: y[0],
                lz: y[1],
                dxx: y[2],
                dyy: y[3],
            };
            let d = derivs_l(&s, chi, gamma);
            dy.copy_from_slice(&[d.l0, d.lz, d.dxx, d.dyy]);
        },
        &y0,
        &grid,
    )?;
    Ok(ys
        .iter()
        .skip(skip)
        .map(|y| LState {
            l0: y[0],
            lz: y[1],
            dxx: y[2],
            dyy: y[3],
        })
        .collect())
}

fn anchored(name: &'static str, grid: &[f64]) -> Result<(Vec<f64>, usize)> {
    validate_grid(name, grid)?;
    if grid[0] < 0.0 {
        return Err(Error::invalid(name, "times must be >= 0"));
    }
    if grid[0] > 0.0 {
        let mut g = vec![0.0];
        g.extend_from_slice(grid);
        Ok((g, 1))
    } else {
        Ok((grid.to_vec(), 0))
    }
}

/// Integrates the closure from the all-in-mode-1 state on a `tau` grid.
///
/// With the L-form representation the equations are solved for
/// `N = 1/epsilon`, `chi = 1`, `Gamma = kappa N` and mapped back.
pub fn integrate_closure(cfg: &ClosureConfig, tau_grid: &[f64]) -> Result<ClosureTrajectory> {
    cfg.validate()?;
    let (grid, skip) = anchored("tau_grid", tau_grid)?;
    let states: Vec<ContractedState> = match cfg.representation {
        Representation::HForm => integrate_h_from(cfg, ContractedState::initial(), &grid)?,
        Representation::LForm => {
            let n = 1.0 / cfg.epsilon;
            let t_grid: Vec<f64> = grid.iter().map(|tau| tau / n).collect();
            let n_atoms = n.round() as usize;
            if (n - n_atoms as f64).abs() > 1e-9 * n {
                return Err(Error::invalid(
                    "epsilon",
                    "L-form needs 1/epsilon to be an integer",
                ));
            }
            integrate_closure_l(n_atoms, 1.0, cfg.kappa * n, &t_grid)?
                .iter()
                .map(|l| ContractedState::from_l(l, n))
                .collect()
        }
    };
    let mut points = Vec::with_capacity(tau_grid.len());
    for (&tau, state) in grid.iter().zip(states).skip(skip) {
        state.check(tau)?;
        points.push(ClosurePoint { tau, state });
    }
    Ok(ClosureTrajectory {
        config: *cfg,
        points,
    })
}

/// Squeezing minimum of the closure located by golden-section search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClosureMinimum {
    pub tau_star: f64,
    pub dxx_min: f64,
}

/// Finds `tau*` and `min dxx` using `n_grid` samples on `[0, tau_max]` to
/// bracket the minimum, then golden-section refinement.
pub fn find_closure_minimum(
    cfg: &ClosureConfig,
    tau_max: f64,
    n_grid: usize,
) -> Result<ClosureMinimum> {
    if !(tau_max.is_finite() && tau_max > 0.0) {
        return Err(Error::invalid("tau_max", "must be finite and > 0"));
    }
    if n_grid < 3 {
        return Err(Error::invalid("n_grid", "need at least 3 samples"));
    }
    let cfg = cfg.with_representation(Representation::HForm);
    let grid: Vec<f64> = (0..n_grid)
        .map(|k| tau_max * k as f64 / (n_grid - 1) as f64)
        .collect();
    let traj = integrate_closure(&cfg, &grid)?;
    let ys = traj.dxx();
    let i = interior_argmin(&ys)?;
    let (a0, start) = (grid[i - 1], traj.points[i - 1].state);
    let eval = |tau: f64| -> Result<f64> {
        if tau <= a0 {
            return Ok(start.dxx);
        }
        Ok(integrate_h_from(&cfg, start, &[a0, tau])?[1].dxx)
    };
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (a0, grid[i + 1]);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = eval(c)?;
    let mut fd = eval(d)?;
    while (b - a).abs() > GOLDEN_TOL * (1.0 + b.abs()) {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = eval(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = eval(d)?;
        }
    }
    let tau_star = 0.5 * (a + b);
    Ok(ClosureMinimum {
        tau_star,
        dxx_min: eval(tau_star)?,
    })
}

/// One time point of [`compare_with_master`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComparisonPoint {
    pub tau: f64,
    pub closure_dxx: f64,
    pub master_dxx: f64,
    /// `|closure - master| / master`.
    pub rel_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleComparison {
    pub n_atoms: usize,
    pub kappa: f64,
    /// Closure squeezing minimum; the comparison window is `[0, tau_star]`.
    pub tau_star: f64,
    pub points: Vec<ComparisonPoint>,
    pub max_rel_error: f64,
    pub max_trace_drift: f64,
}

/// Closure `dxx` against the exact master equation for `N` atoms with
/// `chi = 1` and `Gamma = kappa N`, on `n_points` times up to the closure
/// minimum.
pub fn compare_with_master(
    n_atoms: usize,
    kappa: f64,
    n_points: usize,
) -> Result<OracleComparison> {
    if n_atoms == 0 {
        return Err(Error::invalid("N", "atom count must be at least 1"));
    }
    if n_points < 2 {
        return Err(Error::invalid("n_points", "need at least 2 points"));
    }
    let n = n_atoms as f64;
    let cfg = ClosureConfig::new(1.0 / n, kappa)?;
    let tau_star = find_closure_minimum(&cfg, 8.0, 800)?.tau_star;
    let taus: Vec<f64> = (0..n_points)
        .map(|k| tau_star * k as f64 / (n_points - 1) as f64)
        .collect();
    let closure = integrate_closure(&cfg, &taus)?.dxx();
    let params = TwistParams::symmetric(n_atoms, 1.0, kappa * n)?;
    let ts: Vec<f64> = taus.iter().map(|t| t / n).collect();
    let run = evolve_master_with_states(&params, &ts, false)?;
    let master = run.trajectory.scaled_dxx();
    let points: Vec<ComparisonPoint> = taus
        .iter()
        .zip(closure.iter().zip(&master))
        .map(|(&tau, (&c, &m))| ComparisonPoint {
            tau,
            closure_dxx: c,
            master_dxx: m,
            rel_error: (c - m).abs() / m,
        })
        .collect();
    Ok(OracleComparison {
        n_atoms,
        kappa,
        tau_star,
        max_rel_error: points.iter().map(|p| p.rel_error).fold(0.0, f64::max),
        max_trace_drift: run
            .diagnostics
            .iter()
            .map(|d| d.trace_deviation)
            .fold(0.0, f64::max),
        points,
    })
}

/// Order-of-magnitude estimate `tau* ~ -ln max(kappa, epsilon)`.
pub fn tau_star_estimate(cfg: &ClosureConfig) -> Option<f64> {
    let m = cfg.kappa.max(cfg.epsilon);
    (m > 0.0).then(|| -m.ln())
}

/// Perturbative variance `½ [exp(-2 tau) + kappa + epsilon/2]`.
///
/// With `with_growth` the heuristic term `max(kappa, epsilon)² exp(2 tau)`
/// is added inside the bracket; its coefficient is not derived.
pub fn analytic_variance(cfg: &ClosureConfig, tau: f64, with_growth: bool) -> Result<f64> {
    cfg.validate()?;
    if !(tau.is_finite() && tau >= 0.0) {
        return Err(Error::invalid("tau", "must be finite and >= 0"));
    }
    let mut bracket = (-2.0 * tau).exp() + cfg.kappa + 0.5 * cfg.epsilon;
    if with_growth {
        let m = cfg.kappa.max(cfg.epsilon);
        bracket += m * m * (2.0 * tau).exp();
    }
    Ok(0.5 * bracket)
}

/// Least-squares coefficient `c` of `c exp(2 tau)` in
/// `dxx(tau) - analytic_variance(tau)`, fitted on `[tau*, tau* + span]`.
pub fn measure_growth_coefficient(cfg: &ClosureConfig, span: f64) -> Result<f64> {
    let min = find_closure_minimum(cfg, 12.0, 241)?;
    let grid: Vec<f64> = (0..=40)
        .map(|k| min.tau_star + span * k as f64 / 40.0)
        .collect();
    let traj = integrate_closure(&cfg.with_representation(Representation::HForm), &grid)?;
    let (mut num, mut den) = (0.0, 0.0);
    for p in &traj.points {
        let r = p.state.dxx - analytic_variance(cfg, p.tau, false)?;
        let g = (2.0 * p.tau).exp();
        num += r * g;
        den += g * g;
    }
    Ok(num / den)
}

/// Resource estimates for reaching a squeezing factor `s`. All values are
/// order-of-magnitude.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingEstimate {
    pub feasible: bool,
    /// `ln s / (N chi)`.
    pub time_estimate: f64,
    /// `(N / s) ln s`.
    pub atom_loss_estimate: f64,
    /// `1 / (2 s)`.
    pub target_dxx: f64,
    pub order_of_magnitude: bool,
}

/// Feasibility (`N chi > s Gamma`) and scaling estimates for squeezing by `s`.
pub fn squeezing_scalings(s: f64, n_atoms: usize, chi: f64, gamma: f64) -> Result<ScalingEstimate> {
    let n = n_atoms as f64;
    if n_atoms == 0 {
        return Err(Error::invalid("N", "atom count must be at least 1"));
    }
    if !(s.is_finite() && s >= 1.0 && s <= n) {
        return Err(Error::invalid("s", "need 1 <= s <= N"));
    }
    if !(chi.is_finite() && chi > 0.0) {
        return Err(Error::invalid("chi", "must be finite and > 0"));
    }
    if !(gamma.is_finite() && gamma >= 0.0) {
        return Err(Error::invalid("gamma", "must be finite and >= 0"));
    }
    Ok(ScalingEstimate {
        feasible: n * chi > s * gamma,
        time_estimate: s.ln() / (n * chi),
        atom_loss_estimate: n / s * s.ln(),
        target_dxx: 0.5 / s,
        order_of_magnitude: true,
    })
}
