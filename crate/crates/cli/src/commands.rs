// SPDX-License-Identifier: Apache-2.0

//! One function per subcommand: config in, tables and summary out.

use std::f64::consts::PI;

use serde_json::{json, Value};
use spinsqueeze_core::closure::{
    compare_with_master, find_closure_minimum, integrate_closure, tau_star_estimate, ClosureConfig,
    Representation,
};
use spinsqueeze_core::dicke::{bloch_ground_state, psi_a_state, CMatrix};
use spinsqueeze_core::polariton::{
    analytic_quadrature, closed_form_delta_opt, closed_form_min, closed_form_t_star,
    closed_form_var_opt, degenerate_minimum, derive_rates, min_var_y_plus, regime_classifier,
    scan_delta, scan_two_photon_detuning, simulate, CavityParams,
};
use spinsqueeze_core::ramsey::{midpoint_grid, ramsey_sweep};
use spinsqueeze_core::twist::{
    evolve_master_with_states, evolve_unitary, find_min_variance, MomentTrajectory, TwistParams,
};
use spinsqueeze_core::wigner::{
    multipole_coeffs, sphere_integral, wigner_map, MultipoleBasis, MultipoleDecomposition,
    QuadratureConfig,
};
use spinsqueeze_core::{DickeState, Error};

use crate::config::{
    CavityConfig, CavityScan, CavitySqueeze, CompareOracle, ConfigFile, MasterEvolve, MomentEvolve,
    RamseySweep, RepresentationKind, StateKind, TwistEvolve, WignerMap,
};
use crate::output::{col, Cell, RunOutput, Table};
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::Subcommand)]
pub enum Command {
    /// Ramsey fringe and phase accuracy over a phase grid.
    RamseySweep,
    /// Lossless counter-twisting by exact diagonalization.
    TwistEvolve,
    /// Counter-twisting with particle loss (Lindblad master equation).
    MasterEvolve,
    /// Second-order moment closure.
    MomentEvolve,
    /// Moment closure against the master equation.
    CompareOracle,
    /// Cavity polariton squeezing time series and optimum.
    CavitySqueeze,
    /// Squeezing versus single- and two-photon detuning.
    CavityScan,
    /// Spin Wigner function on a sphere grid.
    WignerMap,
    /// Squeezing regime from the cooperativity inequalities.
    RegimeReport,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::RamseySweep => "ramsey-sweep",
            Command::TwistEvolve => "twist-evolve",
            Command::MasterEvolve => "master-evolve",
            Command::MomentEvolve => "moment-evolve",
            Command::CompareOracle => "compare-oracle",
            Command::CavitySqueeze => "cavity-squeeze",
            Command::CavityScan => "cavity-scan",
            Command::WignerMap => "wigner-map",
            Command::RegimeReport => "regime-report",
        }
    }

    pub fn run(self, cfg: &ConfigFile) -> Result<RunOutput, CliError> {
        let name = self.name();
        match self {
            Command::RamseySweep => ramsey(cfg.section(name)?),
            Command::TwistEvolve => twist(cfg.section(name)?),
            Command::MasterEvolve => master(cfg.section(name)?),
            Command::MomentEvolve => moments(cfg.section(name)?),
            Command::CompareOracle => compare(cfg.section(name)?),
            Command::CavitySqueeze => {
                let (own, cavity) = cfg.cavity_section(name, &["t_max_factor", "n_t"])?;
                cavity_squeeze(own, cavity)
            }
            Command::CavityScan => {
                let (own, cavity) = cfg.cavity_section(
                    name,
                    &["delta_min", "delta_max", "n_delta", "dbar_max", "n_dbar"],
                )?;
                cavity_scan(own, cavity)
            }
            Command::WignerMap => wigner(cfg.section(name)?),
            Command::RegimeReport => {
                let (_, cavity): (toml::Table, CavityConfig) = cfg.cavity_section(name, &[])?;
                regime(cavity)
            }
        }
    }
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![a];
    }
    (0..n)
        .map(|k| a + (b - a) * k as f64 / (n - 1) as f64)
        .collect()
}

fn positive_count(key: &str, n: usize, min: usize) -> Result<(), CliError> {
    if n < min {
        return Err(CliError::Config(format!("key `{key}` must be >= {min}")));
    }
    Ok(())
}

fn positive(key: &str, v: f64) -> Result<(), CliError> {
    if !(v.is_finite() && v > 0.0) {
        return Err(CliError::Config(format!(
            "key `{key}` must be finite and > 0"
        )));
    }
    Ok(())
}

fn build_state(n_atoms: usize, kind: StateKind, a: Option<f64>) -> Result<DickeState, CliError> {
    match kind {
        StateKind::Bloch => Ok(bloch_ground_state(n_atoms)?),
        StateKind::PsiA => {
            let a = a.ok_or_else(|| {
                CliError::Config("missing key `a` (required for state = \"psi_a\")".into())
            })?;
            Ok(psi_a_state(n_atoms, a)?)
        }
        StateKind::Mixed => Err(CliError::Config(
            "key `state`: \"mixed\" is only available for wigner-map".into(),
        )),
    }
}

fn ramsey(c: RamseySweep) -> Result<RunOutput, CliError> {
    positive_count("n_phi", c.n_phi, 1)?;
    if !(c.phi_min.is_finite() && c.phi_max.is_finite() && c.phi_max > c.phi_min) {
        return Err(CliError::Config(
            "keys `phi_min`, `phi_max`: need phi_min < phi_max".into(),
        ));
    }
    let state = build_state(c.n_atoms, c.state, c.a)?;
    let rows = ramsey_sweep(&state, &midpoint_grid(c.phi_min, c.phi_max, c.n_phi))?;
    let mut t = Table::new(
        "ramsey",
        vec![
            col("phi", "rad"),
            col("excited_fraction", "1"),
            col("signal", "hbar"),
            col("std_dev", "hbar"),
            col("phase_accuracy", "rad"),
            col("flagged", "bool"),
        ],
    );
    let mut best: Option<(f64, f64)> = None;
    for r in &rows {
        let acc = r.phase_accuracy.unwrap_or(f64::NAN);
        if let Some(a) = r.phase_accuracy {
            if best.is_none_or(|(_, b)| a < b) {
                best = Some((r.phi, a));
            }
        }
        t.push_nums(&[
            r.phi,
            r.excited_fraction,
            r.signal,
            r.std_dev,
            acc,
            if r.is_flagged() { 1.0 } else { 0.0 },
        ]);
    }
    let summary = json!({
        "n_atoms": c.n_atoms,
        "rows": rows.len(),
        "flagged_rows": rows.iter().filter(|r| r.is_flagged()).count(),
        "best_phi": best.map(|b| b.0),
        "best_phase_accuracy": best.map(|b| b.1),
        "standard_quantum_limit": 1.0 / (c.n_atoms as f64).sqrt(),
        "heisenberg_limit": 1.0 / c.n_atoms as f64,
    });
    Ok(RunOutput {
        tables: vec![t],
        summary,
    })
}

fn moment_table(traj: &MomentTrajectory, chi: f64, extra: &[(f64, f64)]) -> Table {
    let mut cols = vec![
        col("t", "1/chi"),
        col("tau", "1"),
        col("l0", "atoms"),
        col("lx", "hbar"),
        col("ly", "hbar"),
        col("lz", "hbar"),
        col("dxx", "hbar^2"),
        col("dyy", "hbar^2"),
        col("dxx_over_n", "hbar^2"),
    ];
    if !extra.is_empty() {
        cols.push(col("trace_deviation", "1"));
        cols.push(col("min_eigenvalue", "1"));
    }
    let mut t = Table::new("moments", cols);
    let n = traj.n_atoms as f64;
    for (i, r) in traj.rows.iter().enumerate() {
        let mut row = vec![
            r.t,
            n * chi * r.t,
            r.l0,
            r.lx,
            r.ly,
            r.lz,
            r.dxx,
            r.dyy,
            r.dxx / n,
        ];
        if let Some(&(a, b)) = extra.get(i) {
            row.extend([a, b]);
        }
        t.push_nums(&row);
    }
    t
}

fn minimum_summary(traj: &MomentTrajectory, chi: f64) -> Value {
    match find_min_variance(traj) {
        Ok((t, v)) => json!({
            "t_min": t,
            "tau_min": t * traj.n_atoms as f64 * chi,
            "dxx_over_n_min": v,
        }),
        Err(Error::NoInteriorMinimum) => Value::Null,
        Err(e) => json!({ "error": e.to_string() }),
    }
}

fn twist(c: TwistEvolve) -> Result<RunOutput, CliError> {
    positive_count("n_t", c.n_t, 2)?;
    positive("t_max", c.t_max)?;
    let traj = evolve_unitary(c.n_atoms, c.chi, &linspace(0.0, c.t_max, c.n_t))?;
    let summary = json!({
        "n_atoms": c.n_atoms,
        "chi": c.chi,
        "minimum": minimum_summary(&traj, c.chi),
    });
    Ok(RunOutput {
        tables: vec![moment_table(&traj, c.chi, &[])],
        summary,
    })
}

fn master(c: MasterEvolve) -> Result<RunOutput, CliError> {
    positive_count("n_t", c.n_t, 2)?;
    positive("t_max", c.t_max)?;
    let params = TwistParams::new(
        c.n_atoms,
        c.chi,
        c.gamma1.unwrap_or(c.gamma),
        c.gamma2.unwrap_or(c.gamma),
    )?;
    let run = evolve_master_with_states(&params, &linspace(0.0, c.t_max, c.n_t), false)?;
    let diag: Vec<(f64, f64)> = run
        .diagnostics
        .iter()
        .map(|d| (d.trace_deviation, d.min_eigenvalue))
        .collect();
    let summary = json!({
        "n_atoms": c.n_atoms,
        "chi": c.chi,
        "gamma1": params.gamma1,
        "gamma2": params.gamma2,
        "minimum": minimum_summary(&run.trajectory, c.chi),
        "max_trace_deviation": diag.iter().map(|d| d.0).fold(0.0, f64::max),
        "min_eigenvalue": diag.iter().map(|d| d.1).fold(f64::INFINITY, f64::min),
    });
    Ok(RunOutput {
        tables: vec![moment_table(&run.trajectory, c.chi, &diag)],
        summary,
    })
}

fn moments(c: MomentEvolve) -> Result<RunOutput, CliError> {
    positive_count("n_tau", c.n_tau, 3)?;
    positive("tau_max", c.tau_max)?;
    let representation = match c.representation {
        RepresentationKind::H => Representation::HForm,
        RepresentationKind::L => Representation::LForm,
    };
    let cfg = ClosureConfig::new(c.epsilon, c.kappa)?.with_representation(representation);
    let traj = integrate_closure(&cfg, &linspace(0.0, c.tau_max, c.n_tau))?;
    let mut t = Table::new(
        "closure",
        vec![
            col("tau", "1"),
            col("h0", "1"),
            col("hz", "1"),
            col("dxx", "1"),
            col("dyy", "1"),
            col("dxx_over_h0", "1"),
        ],
    );
    for p in &traj.points {
        let s = p.state;
        t.push_nums(&[p.tau, s.h0, s.hz, s.dxx, s.dyy, s.dxx / s.h0]);
    }
    let minimum = match find_closure_minimum(&cfg, c.tau_max, c.n_tau) {
        Ok(m) => json!({ "tau_star": m.tau_star, "dxx_min": m.dxx_min }),
        Err(Error::NoInteriorMinimum) => Value::Null,
        Err(e) => return Err(e.into()),
    };
    let summary = json!({
        "epsilon": c.epsilon,
        "kappa": c.kappa,
        "perturbative": cfg.is_perturbative(),
        "minimum": minimum,
        "tau_star_estimate": tau_star_estimate(&cfg),
    });
    Ok(RunOutput {
        tables: vec![t],
        summary,
    })
}

fn compare(c: CompareOracle) -> Result<RunOutput, CliError> {
    positive_count("n_points", c.n_points, 2)?;
    let cmp = compare_with_master(c.n_atoms, c.kappa, c.n_points)?;
    let mut t = Table::new(
        "comparison",
        vec![
            col("tau", "1"),
            col("dxx_closure", "1"),
            col("dxx_master", "1"),
            col("rel_error", "1"),
        ],
    );
    for p in &cmp.points {
        t.push_nums(&[p.tau, p.closure_dxx, p.master_dxx, p.rel_error]);
    }
    let summary = json!({
        "n_atoms": cmp.n_atoms,
        "kappa": cmp.kappa,
        "tau_star": cmp.tau_star,
        "max_rel_error": cmp.max_rel_error,
        "max_trace_deviation": cmp.max_trace_drift,
    });
    Ok(RunOutput {
        tables: vec![t],
        summary,
    })
}

fn params_json(p: &CavityParams) -> Value {
    serde_json::to_value(p).unwrap_or(Value::Null)
}

fn cavity_squeeze(c: CavitySqueeze, cavity: CavityConfig) -> Result<RunOutput, CliError> {
    positive_count("n_t", c.n_t, 2)?;
    positive("t_max_factor", c.t_max_factor)?;
    let p = cavity.build()?;
    let r = derive_rates(&p)?;
    let m = min_var_y_plus(&p)?;
    let t_star = closed_form_t_star(&p, &r);
    let t_end = c.t_max_factor * m.t_min.max(f64::MIN_POSITIVE);
    let grid = linspace(0.0, t_end, c.n_t);
    let pts = simulate(&p, &grid)?;
    let mut table = Table::new(
        "cavity",
        vec![
            col("t", "1/gamma"),
            col("var_y_plus", "1"),
            col("var_y_minus", "1"),
            col("var_x_plus", "1"),
            col("var_x_minus", "1"),
            col("var_y_plus_closed_form", "1"),
        ],
    );
    let mut warnings = p.warnings();
    warnings.extend(analytic_quadrature(&r, &p, m.t_min)?.warnings);
    for pt in &pts {
        let analytic = analytic_quadrature(&r, &p, pt.t)?;
        let s = pt.stats;
        table.push_nums(&[
            pt.t,
            s.var_y_plus,
            s.var_y_minus,
            s.var_x_plus,
            s.var_x_minus,
            analytic.value,
        ]);
    }
    let degenerate = degenerate_minimum(&p)?;
    warnings.extend(degenerate.warnings.iter().cloned());
    let summary = json!({
        "params": params_json(&p),
        "rates": r,
        "cooperativity": p.cooperativity(),
        "varYplus_min": m.var_y_plus_min,
        "t_min": m.t_min,
        "min_symplectic_eigenvalue": m.min_symplectic_eigenvalue,
        "closed_form": {
            "t_star": t_star,
            "var_y_plus_min": closed_form_min(&p, &r),
            "delta_opt": closed_form_delta_opt(&p),
            "var_y_plus_opt": closed_form_var_opt(&p),
        },
        "degenerate": { "t_min": degenerate.value.0, "var_x_min": degenerate.value.1 },
        "warnings": warnings,
    });
    Ok(RunOutput {
        tables: vec![table],
        summary,
    })
}

fn cavity_scan(c: CavityScan, cavity: CavityConfig) -> Result<RunOutput, CliError> {
    positive_count("n_delta", c.n_delta, 2)?;
    positive_count("n_dbar", c.n_dbar, 2)?;
    positive("dbar_max", c.dbar_max)?;
    let p = cavity.build()?;
    p.validate()?;
    let opt = closed_form_delta_opt(&p);
    let lo = c.delta_min.unwrap_or((opt / 3.0).max(10.0 * p.gamma));
    let hi = c.delta_max.unwrap_or(3.0 * opt);
    positive("delta_min", lo)?;
    if !(hi.is_finite() && hi > lo) {
        return Err(CliError::Config(
            "key `delta_max` must exceed `delta_min`".into(),
        ));
    }
    let deltas: Vec<f64> = (0..c.n_delta)
        .map(|k| lo * (hi / lo).powf(k as f64 / (c.n_delta - 1) as f64))
        .collect();
    let scan = scan_delta(&p, &deltas)?;
    let mut dt = Table::new(
        "delta_scan",
        vec![
            col("delta", "gamma"),
            col("var_y_plus_min", "1"),
            col("t_min", "1/gamma"),
            col("var_y_plus_closed_form", "1"),
        ],
    );
    for s in &scan {
        let q = CavityParams {
            delta: s.delta,
            ..p
        };
        let cf = closed_form_min(&q, &derive_rates(&q)?);
        dt.push_nums(&[s.delta, s.var_y_plus_min, s.t_min, cf]);
    }
    let dbars = linspace(-c.dbar_max, c.dbar_max, c.n_dbar);
    let two_photon = scan_two_photon_detuning(&p, &dbars)?;
    let mut bt = Table::new(
        "two_photon_scan",
        vec![col("dbar", "gamma"), col("var_y_plus_at_t_star", "1")],
    );
    for &(db, v) in &two_photon {
        bt.push_nums(&[db, v]);
    }
    let best = scan
        .iter()
        .fold(None::<(f64, f64)>, |acc, s| match acc {
            Some((_, v)) if v <= s.var_y_plus_min => acc,
            _ => Some((s.delta, s.var_y_plus_min)),
        })
        .expect("nonempty scan");
    let best_dbar = two_photon
        .iter()
        .fold((f64::NAN, f64::INFINITY), |acc, &(d, v)| {
            if v < acc.1 {
                (d, v)
            } else {
                acc
            }
        });
    let summary = json!({
        "params": params_json(&p),
        "delta_opt_closed_form": opt,
        "var_y_plus_opt_closed_form": closed_form_var_opt(&p),
        "delta_best_on_grid": best.0,
        "var_y_plus_best_on_grid": best.1,
        "dbar_best_on_grid": best_dbar.0,
        "var_y_plus_at_best_dbar": best_dbar.1,
    });
    Ok(RunOutput {
        tables: vec![dt, bt],
        summary,
    })
}

fn wigner(c: WignerMap) -> Result<RunOutput, CliError> {
    positive_count("n_theta", c.n_theta, 2)?;
    positive_count("n_phi", c.n_phi, 1)?;
    if c.n_atoms == 0 {
        return Err(CliError::Config("key `n_atoms` must be >= 1".into()));
    }
    let basis = MultipoleBasis::new(c.n_atoms);
    let decomp: MultipoleDecomposition = match c.state {
        StateKind::Mixed => {
            let dim = c.n_atoms + 1;
            let rho = CMatrix::identity(dim, dim).unscale(dim as f64);
            multipole_coeffs(&rho, &basis)?
        }
        kind => {
            let s = build_state(c.n_atoms, kind, c.a)?;
            multipole_coeffs(&s.density_matrix(), &basis)?
        }
    };
    let thetas = linspace(0.0, PI, c.n_theta);
    let phis: Vec<f64> = (0..c.n_phi)
        .map(|j| 2.0 * PI * j as f64 / c.n_phi as f64)
        .collect();
    let grid = wigner_map(&decomp, &thetas, &phis)?;
    let mut t = Table::new(
        "wigner",
        vec![col("theta", "rad"), col("phi", "rad"), col("w", "1")],
    );
    let mut peak = (0.0, 0.0, f64::NEG_INFINITY);
    for (theta, row) in grid.thetas.iter().zip(&grid.values) {
        for (phi, &w) in grid.phis.iter().zip(row) {
            t.push_nums(&[*theta, *phi, w]);
            if w > peak.2 {
                peak = (*theta, *phi, w);
            }
        }
    }
    let mut tables = vec![t];
    if c.coefficients {
        let mut ct = Table::new(
            "multipoles",
            vec![col("k", "1"), col("q", "1"), col("re", "1"), col("im", "1")],
        );
        for k in 0..=decomp.kmax() {
            for q in -(k as i64)..=(k as i64) {
                let v = decomp.get(k, q);
                ct.push_nums(&[k as f64, q as f64, v.re, v.im]);
            }
        }
        tables.push(ct);
    }
    let integral = sphere_integral(&decomp, &QuadratureConfig::default())?;
    let summary = json!({
        "n_atoms": c.n_atoms,
        "sphere_integral": integral,
        "sphere_integral_expected": (4.0 * PI / (c.n_atoms as f64 + 1.0)).sqrt(),
        "max_imaginary_residue": grid.max_imag,
        "conjugation_residual": decomp.conjugation_residual(),
        "peak": { "theta": peak.0, "phi": peak.1, "w": peak.2 },
    });
    Ok(RunOutput { tables, summary })
}

fn regime(cavity: CavityConfig) -> Result<RunOutput, CliError> {
    let p = cavity.build()?;
    let report = regime_classifier(&p)?;
    let mut t = Table::new(
        "inequalities",
        vec![
            col("inequality", "-"),
            col("lhs", "gamma^2"),
            col("rhs", "gamma^2"),
            col("holds", "bool"),
        ],
    );
    for q in &report.inequalities {
        t.push(vec![
            Cell::from(q.name.as_str()),
            Cell::Num(q.lhs),
            Cell::Num(q.rhs),
            Cell::Num(if q.holds { 1.0 } else { 0.0 }),
        ]);
    }
    let summary = serde_json::to_value(&report).unwrap_or(Value::Null);
    Ok(RunOutput {
        tables: vec![t],
        summary,
    })
}
