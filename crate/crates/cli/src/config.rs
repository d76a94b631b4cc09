//! Run configuration file.
//!
//! ```toml
//! seed = 7
//! shots = 10000
//!
//! [qubit]
//! f01_mhz = 243.7
//!
//! [noise]
//! two_axis = "y-only"   # x-only | y-only | correlated | uncorrelated
//! rotations = 19        # noise-frame rotations for `isotropic`
//! [noise.y]
//! kind = "rts"
//! amplitude_mhz = 24.0
//! switching_rate_mhz = 96.0
//!
//! [protocol]
//! tau_n = { start_ns = 0.0, step_ns = 0.205, count = 301 }
//! phi_deg = 0.0
//! ```
//!
//! `seed`, `shots` and `protocol.tau_n` are required; everything else has a
//! default. Unknown keys are rejected.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use purity_core::noise::{NoiseSpec, TwoAxisMode};
use purity_core::protocols::{
    ProtocolConfig, DEFAULT_F01_MHZ, DEFAULT_TAU_B_NS, DEFAULT_T_RAMP_NS,
};
use purity_core::spectral::{Detrend, Window};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const REQUIRED: [&str; 3] = ["seed", "shots", "protocol.tau_n"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub seed: u64,
    pub shots: usize,
    #[serde(default)]
    pub qubit: Qubit,
    #[serde(default)]
    pub noise: Noise,
    pub protocol: Protocol,
    #[serde(default)]
    pub psd: Psd,
    #[serde(default)]
    pub oracle: Oracle,
    #[serde(default)]
    pub noise_gen: NoiseGen,
    #[serde(default)]
    pub output: Output,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Qubit {
    pub f01_mhz: f64,
}

impl Default for Qubit {
    fn default() -> Self {
        Self {
            f01_mhz: DEFAULT_F01_MHZ,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Routing {
    XOnly,
    #[default]
    YOnly,
    Correlated,
    Uncorrelated,
}

impl From<Routing> for TwoAxisMode {
    fn from(r: Routing) -> Self {
        match r {
            Routing::XOnly => TwoAxisMode::XOnly,
            Routing::YOnly => TwoAxisMode::YOnly,
            Routing::Correlated => TwoAxisMode::Correlated,
            Routing::Uncorrelated => TwoAxisMode::Uncorrelated,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Noise {
    pub two_axis: Routing,
    pub rotations: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x: Option<NoiseSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub y: Option<NoiseSpec>,
}

impl Default for Noise {
    fn default() -> Self {
        Self {
            two_axis: Routing::default(),
            rotations: 19,
            x: None,
            y: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TauGrid {
    List(Vec<f64>),
    Range {
        start_ns: f64,
        step_ns: f64,
        count: usize,
    },
}

impl TauGrid {
    pub fn values(&self) -> Vec<f64> {
        match self {
            TauGrid::List(v) => v.clone(),
            TauGrid::Range {
                start_ns,
                step_ns,
                count,
            } => ProtocolConfig::uniform_grid(*start_ns, *step_ns, *count),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Protocol {
    pub tau_n: TauGrid,
    #[serde(default)]
    pub phi_deg: f64,
    #[serde(default = "default_tau_b")]
    pub tau_b_ns: f64,
    #[serde(default = "default_t_ramp")]
    pub t_ramp_ns: f64,
    #[serde(default)]
    pub detuning_correction_mhz: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt_ns: Option<f64>,
    #[serde(default = "default_phi_sweep")]
    pub phi_sweep_deg: Vec<f64>,
}

fn default_tau_b() -> f64 {
    DEFAULT_TAU_B_NS
}

fn default_t_ramp() -> f64 {
    DEFAULT_T_RAMP_NS
}

fn default_phi_sweep() -> Vec<f64> {
    (0..8).map(|k| 45.0 * k as f64).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Series {
    #[default]
    Purity,
    ApproxPurity,
}

impl Series {
    pub fn column(&self) -> &'static str {
        match self {
            Series::Purity => "purity",
            Series::ApproxPurity => "approx_purity",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Psd {
    /// Existing result CSV to analyse instead of running a Ramsey sequence.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input: Option<PathBuf>,
    pub series: Series,
    /// Welch segment length in samples; the raw periodogram when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub segment_length: Option<usize>,
    pub overlap: f64,
    pub window: Window,
    pub detrend: Detrend,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub band_mhz: Option<[f64; 2]>,
}

impl Default for Psd {
    fn default() -> Self {
        Self {
            input: None,
            series: Series::Purity,
            segment_length: None,
            overlap: 0.5,
            window: Window::Hann,
            detrend: Detrend::Mean,
            band_mhz: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Oracle {
    /// Lindblad rate as `Gamma / 2 pi`, MHz.
    pub gamma_mhz: f64,
    /// Transverse noise axis of the jump operator, degrees from x.
    pub jump_axis_deg: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseGen {
    pub shot: usize,
    /// Trace length; defaults to the longest configured sequence.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub duration_ns: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Output {
    pub dir: PathBuf,
    pub prefix: String,
}

impl Default for Output {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("."),
            prefix: String::new(),
        }
    }
}

/// A parsed file together with the raw table it came from.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub config: Config,
    pub raw: toml::Table,
}

pub fn parse(text: &str) -> Result<Loaded> {
    let raw: toml::Table = text
        .parse()
        .map_err(|e: toml::de::Error| anyhow!("parse error: {e}"))?;
    let missing: Vec<&str> = REQUIRED
        .iter()
        .copied()
        .filter(|p| lookup(&raw, p).is_none())
        .collect();
    if !missing.is_empty() {
        bail!("missing required field(s): {}", missing.join(", "));
    }
    let de = toml::Deserializer::new(text);
    let config: Config = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        anyhow!(
            "invalid field `{path}`: {}",
            e.into_inner().to_string().trim()
        )
    })?;
    Ok(Loaded { config, raw })
}

pub fn load(path: &Path) -> Result<Loaded> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse(&text).with_context(|| format!("in {}", path.display()))
}

fn lookup<'a>(table: &'a toml::Table, path: &str) -> Option<&'a toml::Value> {
    let mut parts = path.split('.');
    let mut cur = table.get(parts.next()?)?;
    for p in parts {
        cur = cur.as_table()?.get(p)?;
    }
    Some(cur)
}

fn flatten(prefix: &str, v: &toml::Value, out: &mut BTreeMap<String, toml::Value>) {
    match v {
        toml::Value::Table(t) => {
            for (k, v) in t {
                let p = if prefix.is_empty() {
                    k.clone()
                } else {
                    format!("{prefix}.{k}")
                };
                flatten(&p, v, out);
            }
        }
        other => {
            out.insert(prefix.to_string(), other.clone());
        }
    }
}

impl Config {
    pub fn canonical(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    /// SHA-256 of the canonical serialisation: identical for files that
    /// differ only in layout, key order or spelled-out defaults.
    pub fn digest(&self) -> String {
        hex::encode(Sha256::digest(self.canonical().as_bytes()))
    }

    pub fn protocol_config(&self) -> ProtocolConfig {
        ProtocolConfig {
            f01_mhz: self.qubit.f01_mhz,
            phi: self.protocol.phi_deg.to_radians(),
            tau_b: self.protocol.tau_b_ns,
            tau_n_grid: self.protocol.tau_n.values(),
            t_ramp: self.protocol.t_ramp_ns,
            noise_x: self.noise.x.clone(),
            noise_y: self.noise.y.clone(),
            two_axis: self.noise.two_axis.into(),
            n_shots: self.shots,
            seed: self.seed,
            detuning_correction_mhz: self.protocol.detuning_correction_mhz,
            dt: self.protocol.dt_ns,
        }
    }

    /// Semantic checks beyond the schema.
    pub fn check(&self) -> Result<()> {
        self.protocol_config()
            .validate()
            .map_err(|e| anyhow!("{e}"))?;
        if self.noise.rotations == 0 {
            bail!("noise.rotations must be at least 1");
        }
        if self.protocol.phi_sweep_deg.is_empty() {
            bail!("protocol.phi_sweep_deg must not be empty");
        }
        if !(0.0..=0.9).contains(&self.psd.overlap) {
            bail!("psd.overlap must lie in [0, 0.9]");
        }
        if !(self.oracle.gamma_mhz >= 0.0) {
            bail!("oracle.gamma_mhz must be non-negative");
        }
        Ok(())
    }
}

impl Loaded {
    /// Fields absent from the file, with the values they take.
    pub fn defaulted(&self) -> Vec<(String, toml::Value)> {
        let full = toml::Value::try_from(&self.config).expect("config serialises");
        let mut leaves = BTreeMap::new();
        flatten("", &full, &mut leaves);
        leaves
            .into_iter()
            .filter(|(path, _)| lookup(&self.raw, path).is_none())
            .collect()
    }
}
