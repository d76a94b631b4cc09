//! Classical noise traces: generation, filtering, gating and two-axis routing.
//!
//! Amplitudes inside a [`NoiseTrace`] are angular frequencies in rad/ns, the
//! coefficient of `sigma_x` or `sigma_y` in the Hamiltonian. [`NoiseSpec`]
//! carries user-facing values in MHz and converts on generation.

use std::f64::consts::PI;
use std::io::{Read, Write};

use rand::Rng;
use rand_distr::{Distribution as _, Exp, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;
use crate::units::{mhz_to_per_ns, mhz_to_rad_per_ns, rad_per_ns_to_mhz};

/// A uniformly sampled, sample-and-hold noise amplitude series.
///
/// Sample `k` holds on `[t0 + k dt, t0 + (k + 1) dt)`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseTrace {
    samples: Vec<f64>,
    dt: f64,
    t0: f64,
}

impl NoiseTrace {
    pub fn new(samples: Vec<f64>, dt: f64, t0: f64) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidNoise(format!(
                "sample interval must be positive, got {dt}"
            )));
        }
        if samples.is_empty() {
            return Err(Error::InvalidNoise("trace has no samples".into()));
        }
        if let Some(k) = samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidNoise(format!("sample {k} is not finite")));
        }
        Ok(Self { samples, dt, t0 })
    }

    pub fn zeros(len: usize, dt: f64, t0: f64) -> Result<Self> {
        Self::new(vec![0.0; len], dt, t0)
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Covered time span `len * dt`.
    pub fn span(&self) -> f64 {
        self.samples.len() as f64 * self.dt
    }

    pub fn time(&self, k: usize) -> f64 {
        self.t0 + k as f64 * self.dt
    }

    /// Sample-and-hold value at absolute time `t`; zero outside the trace.
    pub fn value_at(&self, t: f64) -> f64 {
        let u = (t - self.t0) / self.dt;
        if u < 0.0 {
            return 0.0;
        }
        self.samples.get(u.floor() as usize).copied().unwrap_or(0.0)
    }

    pub fn mean_square(&self) -> f64 {
        self.samples.iter().map(|v| v * v).sum::<f64>() / self.samples.len() as f64
    }

    /// Same grid, new samples.
    fn with_samples(&self, samples: Vec<f64>) -> Self {
        Self {
            samples,
            dt: self.dt,
            t0: self.t0,
        }
    }

    fn same_grid(&self, other: &NoiseTrace) -> bool {
        self.samples.len() == other.samples.len()
            && (self.dt - other.dt).abs() <= 1e-12 * self.dt
            && (self.t0 - other.t0).abs() <= 1e-9
    }

    /// Writes `t_ns,amplitude_MHz` rows.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let err = |e: csv::Error| Error::Csv(e.to_string());
        out.write_record(["t_ns", "amplitude_MHz"]).map_err(err)?;
        for (k, v) in self.samples.iter().enumerate() {
            out.write_record(&[self.time(k).to_string(), rad_per_ns_to_mhz(*v).to_string()])
                .map_err(err)?;
        }
        out.flush().map_err(|e| Error::Csv(e.to_string()))
    }

    /// Reads a trace written by [`NoiseTrace::write_csv`] or supplied by the
    /// user in the same format. Times must be uniformly spaced.
    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(r);
        let mut times = Vec::new();
        let mut samples = Vec::new();
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| Error::Csv(e.to_string()))?;
            if rec.len() < 2 {
                return Err(Error::Csv(format!("row {}: expected 2 columns", line + 2)));
            }
            let parse = |s: &str| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Csv(format!("row {}: {e}", line + 2)))
            };
            times.push(parse(&rec[0])?);
            samples.push(mhz_to_rad_per_ns(parse(&rec[1])?));
        }
        if times.len() < 2 {
            return Err(Error::Csv("need at least two samples to infer dt".into()));
        }
        let dt = (times[times.len() - 1] - times[0]) / (times.len() - 1) as f64;
        for (k, t) in times.iter().enumerate() {
            if (t - (times[0] + k as f64 * dt)).abs() > 1e-6 * dt.max(1.0) {
                return Err(Error::Csv(format!("non-uniform sampling at row {}", k + 2)));
            }
        }
        Self::new(samples, dt, times[0])
    }
}

/// Generator family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseKind {
    /// Two-valued random telegraph signal.
    Rts,
    /// Independent Gaussian samples on the simulation grid, optionally low-passed.
    GaussianWhite,
    /// Random telegraph signal followed by a single-pole low-pass filter.
    LowpassRts,
    /// One constant amplitude per shot.
    Quasistatic,
}

/// Amplitude distribution for quasistatic noise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AmplitudeDistribution {
    /// Equiprobable `+a` / `-a`.
    #[default]
    Bimodal,
    /// Zero-mean normal with standard deviation `a`.
    Gaussian,
    /// Uniform on `[-a, a]`.
    Uniform,
}

/// Declarative description of one noise source.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSpec {
    pub kind: NoiseKind,
    /// Amplitude in MHz: RTS level, Gaussian standard deviation or
    /// quasistatic scale depending on `kind`.
    pub amplitude_mhz: f64,
    /// Mean switching rate in MHz (events per microsecond), RTS kinds only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub switching_rate_mhz: Option<f64>,
    /// Low-pass corner in MHz (`lowpass-rts`, optional for `gaussian-white`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cutoff_mhz: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distribution: Option<AmplitudeDistribution>,
    /// Stream label mixed into the master seed. Defaults to the axis label.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl NoiseSpec {
    pub fn rts(amplitude_mhz: f64, switching_rate_mhz: f64) -> Self {
        Self {
            kind: NoiseKind::Rts,
            amplitude_mhz,
            switching_rate_mhz: Some(switching_rate_mhz),
            cutoff_mhz: None,
            distribution: None,
            seed: None,
        }
    }

    pub fn lowpass_rts(amplitude_mhz: f64, switching_rate_mhz: f64, cutoff_mhz: f64) -> Self {
        Self {
            kind: NoiseKind::LowpassRts,
            cutoff_mhz: Some(cutoff_mhz),
            ..Self::rts(amplitude_mhz, switching_rate_mhz)
        }
    }

    pub fn quasistatic(amplitude_mhz: f64, distribution: AmplitudeDistribution) -> Self {
        Self {
            kind: NoiseKind::Quasistatic,
            amplitude_mhz,
            switching_rate_mhz: None,
            cutoff_mhz: None,
            distribution: Some(distribution),
            seed: None,
        }
    }

    pub fn gaussian_white(amplitude_mhz: f64, cutoff_mhz: Option<f64>) -> Self {
        Self {
            kind: NoiseKind::GaussianWhite,
            amplitude_mhz,
            switching_rate_mhz: None,
            cutoff_mhz,
            distribution: None,
            seed: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: Option<f64>, required: bool| -> Result<()> {
            match v {
                Some(x) if !(x > 0.0 && x.is_finite()) => Err(Error::InvalidNoise(format!(
                    "{name} must be positive, got {x}"
                ))),
                None if required => Err(Error::InvalidNoise(format!(
                    "{name} is required for {:?} noise",
                    self.kind
                ))),
                _ => Ok(()),
            }
        };
        if !(self.amplitude_mhz >= 0.0 && self.amplitude_mhz.is_finite()) {
            return Err(Error::InvalidNoise(format!(
                "amplitude must be non-negative, got {}",
                self.amplitude_mhz
            )));
        }
        match self.kind {
            NoiseKind::Rts => positive("switching_rate_mhz", self.switching_rate_mhz, true)?,
            NoiseKind::LowpassRts => {
                positive("switching_rate_mhz", self.switching_rate_mhz, true)?;
                positive("cutoff_mhz", self.cutoff_mhz, true)?;
            }
            NoiseKind::GaussianWhite => positive("cutoff_mhz", self.cutoff_mhz, false)?,
            NoiseKind::Quasistatic => {}
        }
        if self.distribution.is_some() && self.kind != NoiseKind::Quasistatic {
            return Err(Error::InvalidNoise(
                "distribution applies to quasistatic noise only".into(),
            ));
        }
        if self.switching_rate_mhz.is_some()
            && !matches!(self.kind, NoiseKind::Rts | NoiseKind::LowpassRts)
        {
            return Err(Error::InvalidNoise(
                "switching_rate_mhz applies to RTS kinds only".into(),
            ));
        }
        Ok(())
    }

    pub fn amplitude(&self) -> f64 {
        mhz_to_rad_per_ns(self.amplitude_mhz)
    }

    /// Switching rate in events per ns, if any.
    pub fn switching_rate(&self) -> Option<f64> {
        self.switching_rate_mhz.map(mhz_to_per_ns)
    }

    /// Corner frequency in 1/ns, if any.
    pub fn cutoff(&self) -> Option<f64> {
        self.cutoff_mhz.map(mhz_to_per_ns)
    }

    pub fn distribution(&self) -> AmplitudeDistribution {
        self.distribution.unwrap_or_default()
    }

    /// Stationary variance `<eta^2>` in (rad/ns)^2 before any low-pass
    /// filtering.
    pub fn variance(&self) -> f64 {
        let a = self.amplitude();
        match (self.kind, self.distribution()) {
            (NoiseKind::Quasistatic, AmplitudeDistribution::Uniform) => a * a / 3.0,
            _ => a * a,
        }
    }

    /// Generates `len` samples on a grid of spacing `dt` starting at zero.
    pub fn generate<R: Rng + ?Sized>(
        &self,
        len: usize,
        dt: f64,
        rng: &mut R,
    ) -> Result<NoiseTrace> {
        self.validate()?;
        if self.amplitude_mhz == 0.0 {
            return NoiseTrace::zeros(len, dt, 0.0);
        }
        let a = self.amplitude();
        match self.kind {
            NoiseKind::Quasistatic => {
                let v = draw_quasistatic(a, self.distribution(), rng);
                NoiseTrace::new(vec![v; len], dt, 0.0)
            }
            NoiseKind::Rts => {
                let rate = self.switching_rate().unwrap_or(0.0);
                check_rts_resolution(rate, dt)?;
                NoiseTrace::new(rts_samples(a, rate, len, dt, rng), dt, 0.0)
            }
            NoiseKind::LowpassRts => {
                let rate = self.switching_rate().unwrap_or(0.0);
                check_rts_resolution(rate, dt)?;
                let fc = self.cutoff().unwrap_or(f64::INFINITY);
                let burn = burn_in_samples(fc, dt);
                let raw = rts_samples(a, rate, len + burn, dt, rng);
                let filtered = filter_samples(&raw, fc, dt)?;
                NoiseTrace::new(filtered[burn..].to_vec(), dt, 0.0)
            }
            NoiseKind::GaussianWhite => {
                let normal = Normal::new(0.0, a).map_err(|e| Error::InvalidNoise(e.to_string()))?;
                match self.cutoff() {
                    None => {
                        NoiseTrace::new((0..len).map(|_| normal.sample(rng)).collect(), dt, 0.0)
                    }
                    Some(fc) => {
                        let burn = burn_in_samples(fc, dt);
                        let raw: Vec<f64> = (0..len + burn).map(|_| normal.sample(rng)).collect();
                        let filtered = filter_samples(&raw, fc, dt)?;
                        NoiseTrace::new(filtered[burn..].to_vec(), dt, 0.0)
                    }
                }
            }
        }
    }
}

fn draw_quasistatic<R: Rng + ?Sized>(a: f64, dist: AmplitudeDistribution, rng: &mut R) -> f64 {
    match dist {
        AmplitudeDistribution::Bimodal => {
            if rng.gen_bool(0.5) {
                a
            } else {
                -a
            }
        }
        AmplitudeDistribution::Gaussian => {
            let z: f64 = rng.sample(rand_distr::StandardNormal);
            a * z
        }
        AmplitudeDistribution::Uniform => rng.gen_range(-a..=a),
    }
}

fn check_rts_resolution(rate: f64, dt: f64) -> Result<()> {
    if rate > 0.0 && dt > 1.0 / (10.0 * rate) * (1.0 + 1e-12) {
        return Err(Error::GridResolution(format!(
            "dt = {dt} ns does not resolve switching rate {rate}/ns (need dt <= {})",
            1.0 / (10.0 * rate)
        )));
    }
    Ok(())
}

/// Five filter time constants of pre-roll so filtered noise starts stationary.
fn burn_in_samples(cutoff: f64, dt: f64) -> usize {
    if !cutoff.is_finite() {
        return 0;
    }
    (5.0 / (2.0 * PI * cutoff) / dt).ceil() as usize
}

/// Continuous-time telegraph process observed at `t_k = k dt`.
fn rts_samples<R: Rng + ?Sized>(a: f64, rate: f64, len: usize, dt: f64, rng: &mut R) -> Vec<f64> {
    let mut level = if rng.gen_bool(0.5) { a } else { -a };
    if rate <= 0.0 {
        return vec![level; len];
    }
    let wait = Exp::new(rate).expect("positive rate");
    let mut next_switch = wait.sample(rng);
    let mut out = Vec::with_capacity(len);
    for k in 0..len {
        let t = k as f64 * dt;
        while next_switch <= t {
            level = -level;
            next_switch += wait.sample(rng);
        }
        out.push(level);
    }
    out
}

/// Random telegraph signal of level `amplitude` (rad/ns) with Poisson
/// switching at `switching_rate` events/ns, sampled every `dt` ns.
///
/// The autocorrelation is `amplitude^2 exp(-2 switching_rate tau)`.
pub fn gen_rts(
    amplitude: f64,
    switching_rate: f64,
    duration: f64,
    dt: f64,
    seed: u64,
) -> Result<NoiseTrace> {
    if !(amplitude >= 0.0) || !(switching_rate >= 0.0) {
        return Err(Error::InvalidNoise(
            "amplitude and switching rate must be non-negative".into(),
        ));
    }
    if !(dt > 0.0) || duration < dt * (1.0 - 1e-12) {
        return Err(Error::GridResolution(format!(
            "duration {duration} ns shorter than dt {dt} ns"
        )));
    }
    check_rts_resolution(switching_rate, dt)?;
    let len = ((duration / dt).round() as usize).max(1);
    if amplitude == 0.0 {
        return NoiseTrace::zeros(len, dt, 0.0);
    }
    let mut rng = seed::rng_from(seed, &[]);
    NoiseTrace::new(
        rts_samples(amplitude, switching_rate, len, dt, &mut rng),
        dt,
        0.0,
    )
}

/// One constant amplitude (rad/ns) per shot. Shot `i` draws from the stream
/// `(seed, i)`, so any subset of shots can be regenerated independently.
pub fn gen_quasistatic(spec: &NoiseSpec, n_shots: usize, seed: u64) -> Result<Vec<f64>> {
    spec.validate()?;
    let a = spec.amplitude();
    Ok((0..n_shots)
        .map(|i| {
            if a == 0.0 {
                return 0.0;
            }
            let mut rng = seed::rng_from(seed, &[i as u64]);
            draw_quasistatic(a, spec.distribution(), &mut rng)
        })
        .collect())
}

fn filter_samples(x: &[f64], cutoff: f64, dt: f64) -> Result<Vec<f64>> {
    let nyquist = 0.5 / dt;
    if !(cutoff > 0.0) || cutoff >= nyquist {
        return Err(Error::InvalidNoise(format!(
            "cutoff {cutoff}/ns must lie in (0, Nyquist = {nyquist}/ns)"
        )));
    }
    let alpha = 1.0 - (-2.0 * PI * cutoff * dt).exp();
    let mut y = x.first().copied().unwrap_or(0.0);
    Ok(x.iter()
        .map(|&v| {
            y += alpha * (v - y);
            y
        })
        .collect())
}

/// Single-pole low-pass (exponential smoothing with time constant
/// `1 / (2 pi cutoff)`), initialised at the first input sample.
pub fn lowpass_filter(trace: &NoiseTrace, cutoff: f64) -> Result<NoiseTrace> {
    Ok(trace.with_samples(filter_samples(&trace.samples, cutoff, trace.dt)?))
}

/// Raised-cosine gate: 0 before `tau_b`, ramps to 1 over `t_ramp`, holds for
/// `tau_n`, ramps back down over `t_ramp`, 0 afterwards. `t` is measured from
/// the start of the sequence.
pub fn gate_envelope(t: f64, tau_b: f64, tau_n: f64, t_ramp: f64) -> f64 {
    let ramp = |u: f64| 0.5 * (1.0 - (PI * u).cos());
    let up_end = tau_b + t_ramp;
    let hold_end = up_end + tau_n;
    let down_end = hold_end + t_ramp;
    if t < tau_b || t >= down_end {
        0.0
    } else if t < up_end {
        ramp((t - tau_b) / t_ramp)
    } else if t < hold_end {
        1.0
    } else {
        ramp((down_end - t) / t_ramp)
    }
}

/// Envelope value applied to sample `k` of a trace: the gate evaluated at the
/// sample midpoint.
pub fn gate_sample(trace_dt: f64, k: usize, tau_b: f64, tau_n: f64, t_ramp: f64) -> f64 {
    gate_envelope((k as f64 + 0.5) * trace_dt, tau_b, tau_n, t_ramp)
}

/// Multiplies a trace by the noise gate. Times are relative to the trace start.
pub fn gate(trace: &NoiseTrace, tau_b: f64, tau_n: f64, t_ramp: f64) -> Result<NoiseTrace> {
    if tau_b < 0.0 || tau_n < 0.0 || t_ramp < 0.0 {
        return Err(Error::InvalidNoise(
            "gate timings must be non-negative".into(),
        ));
    }
    let end = tau_b + tau_n + 2.0 * t_ramp;
    if end > trace.span() * (1.0 + 1e-12) + 1e-9 {
        return Err(Error::WindowExceedsTrace {
            start: tau_b,
            end,
            span: trace.span(),
        });
    }
    let samples = trace
        .samples
        .iter()
        .enumerate()
        .map(|(k, v)| v * gate_sample(trace.dt, k, tau_b, tau_n, t_ramp))
        .collect();
    Ok(trace.with_samples(samples))
}

/// How noise sources are routed onto the `sigma_x` and `sigma_y` drives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TwoAxisMode {
    XOnly,
    YOnly,
    /// One source split onto both axes: noise along `x + y`.
    Correlated,
    /// Independent equal-variance sources on each axis.
    Uncorrelated,
    /// Uncorrelated base noise replicated with the noise frame rotated by
    /// `2 pi k / K`, `k = 0..K`, and averaged.
    RotatedEnsemble(usize),
}

impl TwoAxisMode {
    /// Number of independent base sources the mode consumes.
    pub fn sources(&self) -> usize {
        match self {
            TwoAxisMode::XOnly | TwoAxisMode::YOnly | TwoAxisMode::Correlated => 1,
            TwoAxisMode::Uncorrelated | TwoAxisMode::RotatedEnsemble(_) => 2,
        }
    }

    /// Number of noise-frame rotations averaged per shot.
    pub fn rotations(&self) -> usize {
        match self {
            TwoAxisMode::RotatedEnsemble(k) => *k,
            _ => 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            TwoAxisMode::RotatedEnsemble(0) => {
                Err(Error::InvalidNoise("rotated ensemble needs K >= 1".into()))
            }
            _ => Ok(()),
        }
    }
}

/// Routes base traces onto `(eta_x, eta_y)`.
///
/// `RotatedEnsemble` accepts either one trace (a single x-axis source) or two
/// (an uncorrelated pair); the rotations themselves are applied by the
/// protocol layer with [`rotate_pair`].
pub fn compose_two_axis(
    mode: TwoAxisMode,
    base: &[NoiseTrace],
) -> Result<(NoiseTrace, NoiseTrace)> {
    mode.validate()?;
    let first = base
        .first()
        .ok_or_else(|| Error::NoiseRouting("no base traces supplied".into()))?;
    if let Some(bad) = base.iter().find(|t| !first.same_grid(t)) {
        return Err(Error::GridMismatch(format!(
            "base traces differ: {} samples at dt {} vs {} samples at dt {}",
            first.len(),
            first.dt,
            bad.len(),
            bad.dt
        )));
    }
    let zeros = || first.with_samples(vec![0.0; first.len()]);
    let need = |n: usize| {
        if base.len() < n {
            Err(Error::NoiseRouting(format!(
                "{mode:?} needs {n} base traces, got {}",
                base.len()
            )))
        } else {
            Ok(())
        }
    };
    match mode {
        TwoAxisMode::XOnly => Ok((first.clone(), zeros())),
        TwoAxisMode::YOnly => Ok((zeros(), first.clone())),
        TwoAxisMode::Correlated => Ok((first.clone(), first.clone())),
        TwoAxisMode::Uncorrelated => {
            need(2)?;
            Ok((first.clone(), base[1].clone()))
        }
        TwoAxisMode::RotatedEnsemble(_) => {
            if base.len() >= 2 {
                Ok((first.clone(), base[1].clone()))
            } else {
                Ok((first.clone(), zeros()))
            }
        }
    }
}

/// Rotates the noise vector `(eta_x, eta_y)` by `angle` about z.
pub fn rotate_pair(
    eta_x: &NoiseTrace,
    eta_y: &NoiseTrace,
    angle: f64,
) -> Result<(NoiseTrace, NoiseTrace)> {
    if !eta_x.same_grid(eta_y) {
        return Err(Error::GridMismatch("x and y traces differ".into()));
    }
    let (s, c) = angle.sin_cos();
    let (x, y): (Vec<f64>, Vec<f64>) = eta_x
        .samples
        .iter()
        .zip(&eta_y.samples)
        .map(|(&ex, &ey)| (c * ex - s * ey, s * ex + c * ey))
        .unzip();
    Ok((eta_x.with_samples(x), eta_y.with_samples(y)))
}
