// SPDX-License-Identifier: Apache-2.0

//! TOML configuration. Each subcommand reads the table of the same name;
//! other tables are ignored, so one file can drive several runs.
//!
//! Rates are in units of `gamma`, which defaults to 1.

use serde::de::DeserializeOwned;
use serde::Deserialize;
use spinsqueeze_core::polariton::{closed_form_delta_opt, CavityParams};

use crate::CliError;

/// Parsed configuration file.
#[derive(Debug, Clone, Default)]
pub struct ConfigFile {
    tables: toml::Table,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let tables: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| CliError::Config(e.to_string()))?;
        Ok(ConfigFile { tables })
    }

    fn table(&self, name: &str) -> Result<toml::Table, CliError> {
        match self.tables.get(name) {
            Some(toml::Value::Table(t)) => Ok(t.clone()),
            Some(_) => Err(CliError::Config(format!("`{name}` must be a table"))),
            None => Err(CliError::Config(format!("missing table `[{name}]`"))),
        }
    }

    /// Typed contents of table `name`; unknown keys are rejected.
    pub fn section<T: DeserializeOwned>(&self, name: &str) -> Result<T, CliError> {
        decode(name, self.table(name)?)
    }

    /// Table `name` split into the subcommand's own keys and the cavity
    /// parameters.
    pub fn cavity_section<T: DeserializeOwned>(
        &self,
        name: &str,
        own_keys: &[&str],
    ) -> Result<(T, CavityConfig), CliError> {
        let mut rest = self.table(name)?;
        let mut own = toml::Table::new();
        for key in own_keys {
            if let Some(v) = rest.remove(*key) {
                own.insert((*key).to_string(), v);
            }
        }
        Ok((decode(name, own)?, decode(name, rest)?))
    }
}

fn decode<T: DeserializeOwned>(name: &str, table: toml::Table) -> Result<T, CliError> {
    T::deserialize(toml::Value::Table(table))
        .map_err(|e| CliError::Config(format!("[{name}]: {e}")))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StateKind {
    Bloch,
    PsiA,
    Mixed,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RamseySweep {
    pub n_atoms: usize,
    pub state: StateKind,
    /// Family parameter, required for `psi_a`.
    pub a: Option<f64>,
    #[serde(default = "default_phi_points")]
    pub n_phi: usize,
    #[serde(default)]
    pub phi_min: f64,
    #[serde(default = "default_phi_max")]
    pub phi_max: f64,
}

fn default_phi_points() -> usize {
    401
}

fn default_phi_max() -> f64 {
    std::f64::consts::PI
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TwistEvolve {
    pub n_atoms: usize,
    #[serde(default = "one")]
    pub chi: f64,
    pub t_max: f64,
    #[serde(default = "default_time_points")]
    pub n_t: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MasterEvolve {
    pub n_atoms: usize,
    #[serde(default = "one")]
    pub chi: f64,
    /// Loss rate applied to both modes unless `gamma1`/`gamma2` are set.
    #[serde(default)]
    pub gamma: f64,
    pub gamma1: Option<f64>,
    pub gamma2: Option<f64>,
    pub t_max: f64,
    #[serde(default = "default_time_points")]
    pub n_t: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RepresentationKind {
    H,
    L,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MomentEvolve {
    /// `1/N`; `0` selects the bosonic limit.
    pub epsilon: f64,
    #[serde(default)]
    pub kappa: f64,
    #[serde(default = "default_representation")]
    pub representation: RepresentationKind,
    pub tau_max: f64,
    #[serde(default = "default_time_points")]
    pub n_tau: usize,
}

fn default_representation() -> RepresentationKind {
    RepresentationKind::H
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareOracle {
    pub n_atoms: usize,
    #[serde(default)]
    pub kappa: f64,
    /// Comparison points between `tau = 0` and the closure minimum.
    #[serde(default = "default_compare_points")]
    pub n_points: usize,
}

fn default_compare_points() -> usize {
    41
}

/// Cavity parameters. Couplings, drives and `kappa` default to 1 (`g1` and
/// `g2` to `g`), detunings and `gamma0` to 0, branching rates to `gamma`,
/// and `delta` to the closed-form optimum. Exactly one of `cooperativity`
/// (`g1² N / (kappa gamma)`) and `n_atoms` is required.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CavityConfig {
    pub cooperativity: Option<f64>,
    pub n_atoms: Option<f64>,
    pub g: Option<f64>,
    pub g1: Option<f64>,
    pub g2: Option<f64>,
    pub omega1: Option<f64>,
    pub omega2: Option<f64>,
    pub delta: Option<f64>,
    pub delta1: Option<f64>,
    pub delta2: Option<f64>,
    pub gamma: Option<f64>,
    pub gamma_br1: Option<f64>,
    pub gamma_br2: Option<f64>,
    pub gamma0: Option<f64>,
    pub kappa: Option<f64>,
}

impl CavityConfig {
    pub fn build(&self) -> Result<CavityParams, CliError> {
        let gamma = self.gamma.unwrap_or(1.0);
        let g = self.g.unwrap_or(1.0);
        let g1 = self.g1.unwrap_or(g);
        let kappa = self.kappa.unwrap_or(1.0);
        let n_atoms = match (self.cooperativity, self.n_atoms) {
            (Some(c), None) => {
                if !(c.is_finite() && c > 0.0 && g1 > 0.0) {
                    return Err(CliError::Config(
                        "key `cooperativity` must be > 0 with g1 > 0".into(),
                    ));
                }
                c * kappa * gamma / (g1 * g1)
            }
            (None, Some(n)) => n,
            (Some(_), Some(_)) => {
                return Err(CliError::Config(
                    "keys `cooperativity` and `n_atoms` are exclusive".into(),
                ))
            }
            (None, None) => {
                return Err(CliError::Config(
                    "missing key `cooperativity` or `n_atoms`".into(),
                ))
            }
        };
        let mut p = CavityParams {
            g1,
            g2: self.g2.unwrap_or(g),
            omega1: self.omega1.unwrap_or(1.0),
            omega2: self.omega2.unwrap_or(1.0),
            delta: 0.0,
            delta1: self.delta1.unwrap_or(0.0),
            delta2: self.delta2.unwrap_or(0.0),
            gamma,
            gamma_br1: self.gamma_br1.unwrap_or(gamma),
            gamma_br2: self.gamma_br2.unwrap_or(gamma),
            gamma0: self.gamma0.unwrap_or(0.0),
            kappa_cav: kappa,
            n_atoms,
        };
        p.delta = self.delta.unwrap_or_else(|| closed_form_delta_opt(&p));
        Ok(p)
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CavitySqueeze {
    /// End of the exported time series in units of the numerical minimum time.
    #[serde(default = "default_t_max_factor")]
    pub t_max_factor: f64,
    #[serde(default = "default_time_points")]
    pub n_t: usize,
}

fn default_t_max_factor() -> f64 {
    1.25
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CavityScan {
    /// `Delta` grid, log-spaced; defaults to `[Delta_opt/3, 3 Delta_opt]`.
    pub delta_min: Option<f64>,
    pub delta_max: Option<f64>,
    #[serde(default = "default_scan_points")]
    pub n_delta: usize,
    /// Two-photon detuning grid `d1 - d2`, linear.
    #[serde(default = "default_dbar_max")]
    pub dbar_max: f64,
    #[serde(default = "default_scan_points")]
    pub n_dbar: usize,
}

fn default_scan_points() -> usize {
    41
}

fn default_dbar_max() -> f64 {
    0.05
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WignerMap {
    pub n_atoms: usize,
    pub state: StateKind,
    /// Family parameter, required for `psi_a`.
    pub a: Option<f64>,
    #[serde(default = "default_theta_points")]
    pub n_theta: usize,
    #[serde(default = "default_phi_grid")]
    pub n_phi: usize,
    /// Also write the `(k, q, Re, Im)` coefficient table.
    #[serde(default)]
    pub coefficients: bool,
}

fn default_theta_points() -> usize {
    64
}

fn default_phi_grid() -> usize {
    128
}

fn one() -> f64 {
    1.0
}

fn default_time_points() -> usize {
    201
}
