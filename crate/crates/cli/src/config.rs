//! Run configuration: TOML file, `PQST_<SECTION>_<KEY>` environment
//! overrides, then command-line flags.

use std::path::Path;

use parity_qst::dynamics::{Propagator, Tolerances};
use parity_qst::effective::Channels;
use parity_qst::models::{DickeParams, FullModelParams, QrsParams};
use parity_qst::protocol::{LossRates, Mediator, SamplingScheme};
use parity_qst::units::PhysicalScale;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const ENV_PREFIX: &str = "PQST_";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum MediatorKind {
    #[default]
    Rabi,
    Dicke,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MediatorSection {
    pub kind: MediatorKind,
    pub omega_cav: f64,
    pub omega_q: [f64; 2],
    pub g: [f64; 2],
    /// Fock cutoff per mode; 16 for one mode, 8 per mode otherwise.
    pub n_fock: Option<usize>,
    /// External qubit frequencies; omitted means the first parity-forbidden
    /// mediator transition.
    pub omega_ext: Option<[f64; 2]>,
    pub lambda: [f64; 2],
    /// Number of degenerate modes for the Dicke mediator.
    pub modes: usize,
    pub external_levels: usize,
    pub anharmonicity: f64,
}

impl Default for MediatorSection {
    fn default() -> Self {
        Self {
            kind: MediatorKind::Rabi,
            omega_cav: 1.0,
            omega_q: [1.0; 2],
            g: [0.3; 2],
            n_fock: None,
            omega_ext: None,
            lambda: [0.02; 2],
            modes: 2,
            external_levels: 2,
            anharmonicity: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhysicalSection {
    pub cavity_ghz: f64,
    pub temperature_mk: f64,
    /// k_B T / ħω_cav; overrides `temperature_mk`.
    pub theta: Option<f64>,
}

impl Default for PhysicalSection {
    fn default() -> Self {
        Self { cavity_ghz: 8.13, temperature_mk: 100.0, theta: None }
    }
}

/// Rates Γ/2π in MHz.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossSection {
    pub kappa_mhz: f64,
    pub gamma_mhz: f64,
    pub gamma_ext_mhz: f64,
    pub gamma_phi_mhz: f64,
}

impl Default for LossSection {
    fn default() -> Self {
        Self { kappa_mhz: 0.10, gamma_mhz: 15.0, gamma_ext_mhz: 0.48, gamma_phi_mhz: 0.15 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectrumSection {
    /// `param:start:stop:points` with param one of g, omega_q, omega_cav.
    pub sweep: String,
    pub levels: usize,
}

impl Default for SpectrumSection {
    fn default() -> Self {
        Self { sweep: "g:0:1:200".into(), levels: 12 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TransferSection {
    pub time_points: usize,
    pub horizon: f64,
    pub t_max: Option<f64>,
    pub channels: Channels,
    pub effective_only: bool,
}

impl Default for TransferSection {
    fn default() -> Self {
        Self { time_points: 1500, horizon: 2.2, t_max: None, channels: Channels::AllAllowed, effective_only: false }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PropagatorKind {
    #[default]
    Chebyshev,
    Adaptive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QstSection {
    pub samples: usize,
    pub sampling: SamplingScheme,
    pub seed: u64,
    pub time_points: usize,
    pub horizon: f64,
    pub t_max: Option<f64>,
    /// Defaults to 4.5 (single mode) or 3.2 (Dicke).
    pub frame_cutoff: Option<f64>,
    pub upward_rates: bool,
    pub propagator: PropagatorKind,
    /// Chebyshev truncation tolerance, or rtol for the adaptive integrator.
    pub tolerance: Option<f64>,
}

impl Default for QstSection {
    fn default() -> Self {
        Self {
            samples: 4000,
            sampling: SamplingScheme::Fibonacci,
            seed: 0,
            time_points: 600,
            horizon: 2.5,
            t_max: None,
            frame_cutoff: None,
            upward_rates: false,
            propagator: PropagatorKind::Chebyshev,
            tolerance: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CheckSection {
    pub levels: usize,
    pub sweep_points: usize,
}

impl Default for CheckSection {
    fn default() -> Self {
        Self { levels: 12, sweep_points: 50 }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub mediator: MediatorSection,
    pub physical: PhysicalSection,
    pub losses: LossSection,
    pub spectrum: SpectrumSection,
    pub transfer: TransferSection,
    pub qst: QstSection,
    pub check: CheckSection,
}

const SECTIONS: [&str; 7] = ["mediator", "physical", "losses", "spectrum", "transfer", "qst", "check"];

/// Interpret an environment value as a TOML value, falling back to a string.
fn env_value(raw: &str) -> toml::Value {
    match format!("v = {raw}").parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| toml::Value::String(raw.into())),
        Err(_) => toml::Value::String(raw.into()),
    }
}

/// Apply `PQST_<SECTION>_<KEY>=value` pairs to a parsed table.
pub fn apply_env<I>(table: &mut toml::Table, vars: I) -> Result<(), CliError>
where
    I: IntoIterator<Item = (String, String)>,
{
    let mut vars: Vec<(String, String)> = vars.into_iter().filter(|(k, _)| k.starts_with(ENV_PREFIX)).collect();
    vars.sort();
    for (k, v) in vars {
        let rest = k[ENV_PREFIX.len()..].to_ascii_lowercase();
        let Some((section, key)) = rest.split_once('_') else {
            return Err(CliError::Config(format!("environment variable {k} has no key")));
        };
        if !SECTIONS.contains(&section) {
            return Err(CliError::Config(format!("environment variable {k}: unknown section '{section}'")));
        }
        let entry = table.entry(section.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        let toml::Value::Table(sec) = entry else {
            return Err(CliError::Config(format!("'{section}' is not a table")));
        };
        sec.insert(key.to_string(), env_value(&v));
    }
    Ok(())
}

pub fn parse(text: &str, env: impl IntoIterator<Item = (String, String)>) -> Result<Config, CliError> {
    let mut table: toml::Table = text.parse().map_err(|e: toml::de::Error| CliError::Config(e.to_string()))?;
    apply_env(&mut table, env)?;
    let cfg: Config = toml::Value::Table(table).try_into().map_err(|e: toml::de::Error| CliError::Config(e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load(path: Option<&Path>) -> Result<Config, CliError> {
    let text = match path {
        Some(p) => std::fs::read_to_string(p).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?,
        None => String::new(),
    };
    parse(&text, std::env::vars())
}

impl Config {
    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        if self.physical.cavity_ghz <= 0.0 {
            return bad(format!("physical.cavity_ghz must be > 0, got {}", self.physical.cavity_ghz));
        }
        if self.physical.temperature_mk < 0.0 {
            return bad(format!("physical.temperature_mk must be >= 0, got {}", self.physical.temperature_mk));
        }
        if self.mediator.modes == 0 {
            return bad("mediator.modes must be >= 1".into());
        }
        if self.qst.samples == 0 {
            return bad("qst.samples must be >= 1".into());
        }
        parse_sweep(&self.spectrum.sweep)?;
        Ok(())
    }

    pub fn scale(&self) -> PhysicalScale {
        PhysicalScale::from_ghz(self.physical.cavity_ghz)
    }

    pub fn theta(&self) -> f64 {
        self.physical.theta.unwrap_or_else(|| self.scale().theta_from_millikelvin(self.physical.temperature_mk))
    }

    pub fn losses(&self) -> LossRates {
        let l = &self.losses;
        LossRates::from_mhz(&self.scale(), l.kappa_mhz, l.gamma_mhz, l.gamma_ext_mhz, l.gamma_phi_mhz)
    }

    pub fn n_fock(&self) -> usize {
        self.mediator.n_fock.unwrap_or(match self.mediator.kind {
            MediatorKind::Rabi => 16,
            MediatorKind::Dicke => 8,
        })
    }

    pub fn qrs(&self) -> QrsParams {
        let m = &self.mediator;
        QrsParams { omega_cav: m.omega_cav, omega_q: m.omega_q, g: m.g, n_fock: self.n_fock() }
    }

    /// Dicke parameters with degenerate modes; couplings split as 1/√M.
    pub fn dicke(&self) -> DickeParams {
        let m = &self.mediator;
        let s = (m.modes as f64).sqrt();
        DickeParams {
            mode_freqs: vec![m.omega_cav; m.modes],
            g_matrix: vec![[m.g[0] / s, m.g[1] / s]; m.modes],
            lambda_matrix: vec![[m.lambda[0] / s, m.lambda[1] / s]; m.modes],
            omega_q: m.omega_q,
            omega_ext: m.omega_ext.unwrap_or([1.0; 2]),
            n_fock: self.n_fock(),
            external_levels: m.external_levels,
            anharmonicity: m.anharmonicity,
        }
    }

    /// Mediator with external frequencies resolved.
    pub fn build_mediator(&self) -> Result<Mediator, CliError> {
        let mut med = match self.mediator.kind {
            MediatorKind::Rabi => {
                if self.mediator.external_levels != 2 {
                    return Err(CliError::Config("external_levels = 3 requires the dicke mediator".into()));
                }
                Mediator::Rabi(FullModelParams {
                    qrs: self.qrs(),
                    omega_ext: self.mediator.omega_ext.unwrap_or([1.0; 2]),
                    lambda: self.mediator.lambda,
                })
            }
            MediatorKind::Dicke => Mediator::Dicke(self.dicke()),
        };
        med.validate().map_err(|e| CliError::Config(e.to_string()))?;
        if self.mediator.omega_ext.is_none() {
            let w = med
                .mediator_eigensystem()?
                .forbidden_resonance()
                .ok_or_else(|| CliError::Config("no parity-forbidden transition; set mediator.omega_ext".into()))?;
            match &mut med {
                Mediator::Rabi(p) => p.omega_ext = [w; 2],
                Mediator::Dicke(p) => p.omega_ext = [w; 2],
            }
        }
        Ok(med)
    }

    pub fn propagator(&self) -> Propagator {
        match self.qst.propagator {
            PropagatorKind::Chebyshev => Propagator::Chebyshev { tol: self.qst.tolerance.unwrap_or(1e-12) },
            PropagatorKind::Adaptive => {
                let d = Tolerances::default();
                let rtol = self.qst.tolerance.unwrap_or(d.rtol);
                Propagator::Adaptive(Tolerances { rtol, atol: d.atol.min(rtol * 1e-2) })
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    pub param: String,
    pub start: f64,
    pub stop: f64,
    pub points: usize,
}

pub fn parse_sweep(s: &str) -> Result<Sweep, CliError> {
    let parts: Vec<&str> = s.split(':').collect();
    let err = || CliError::Config(format!("sweep '{s}' must look like param:start:stop:points"));
    if parts.len() != 4 {
        return Err(err());
    }
    let param = parts[0].trim().to_string();
    if !["g", "omega_q", "omega_cav"].contains(&param.as_str()) {
        return Err(CliError::Config(format!("unknown sweep parameter '{param}' (g, omega_q, omega_cav)")));
    }
    let start: f64 = parts[1].trim().parse().map_err(|_| err())?;
    let stop: f64 = parts[2].trim().parse().map_err(|_| err())?;
    let points: usize = parts[3].trim().parse().map_err(|_| err())?;
    if points == 0 || !start.is_finite() || !stop.is_finite() {
        return Err(err());
    }
    Ok(Sweep { param, start, stop, points })
}
