//! Ramsey and relaxation sequences with gated noise injection.
//!
//! Sequence timeline, measured from the (instantaneous) preparation pulse:
//!
//! ```text
//! | tau_b free | ramp up | noise on for tau_n | ramp down | tau_b free |
//! ```
//!
//! so the total free-precession time is `2 tau_b + 2 t_ramp + tau_n`. All
//! durations are snapped to the integration step, and the step is chosen so
//! a uniform `tau_n` grid lands exactly on it.
//!
//! Every `tau_n` point of one shot uses the same noise realisation: the
//! noise-on segment is propagated once, and at each recorded `tau_n` a copy is
//! branched off through the ramp-down and the final buffer. This is equivalent
//! to gating a fresh copy of the trace per point (see the tests) at a fraction
//! of the cost.

use std::f64::consts::{FRAC_PI_2, PI};
use std::io::Write;

use crate::dynamics::{default_dt, parallel_ensemble, su2_step, StateSums};
use crate::error::{Error, Result};
use crate::noise::{NoiseSpec, NoiseTrace, TwoAxisMode};
use crate::qubit::{approx_purity, rotate_ideal, to_rotating_frame, BlochVector, DensityMatrix};
use crate::seed::{rng_from, AXIS_X, AXIS_Y};
use crate::units::mhz_to_rad_per_ns;

pub const DEFAULT_F01_MHZ: f64 = 243.7;
pub const DEFAULT_TAU_B_NS: f64 = 10.0;
pub const DEFAULT_T_RAMP_NS: f64 = 0.5;

#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolConfig {
    pub f01_mhz: f64,
    /// Initial superposition phase, rad.
    pub phi: f64,
    pub tau_b: f64,
    /// Noise durations, ns, sorted ascending.
    pub tau_n_grid: Vec<f64>,
    pub t_ramp: f64,
    pub noise_x: Option<NoiseSpec>,
    pub noise_y: Option<NoiseSpec>,
    pub two_axis: TwoAxisMode,
    pub n_shots: usize,
    pub seed: u64,
    /// Frequency, MHz, at which the transfer-pulse axis is advanced.
    pub detuning_correction_mhz: f64,
    /// Integration step override, ns.
    pub dt: Option<f64>,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        Self {
            f01_mhz: DEFAULT_F01_MHZ,
            phi: 0.0,
            tau_b: DEFAULT_TAU_B_NS,
            tau_n_grid: vec![0.0],
            t_ramp: DEFAULT_T_RAMP_NS,
            noise_x: None,
            noise_y: None,
            two_axis: TwoAxisMode::YOnly,
            n_shots: 1,
            seed: 0,
            detuning_correction_mhz: 0.0,
            dt: None,
        }
    }
}

impl ProtocolConfig {
    pub fn omega(&self) -> f64 {
        mhz_to_rad_per_ns(self.f01_mhz)
    }

    /// Uniformly spaced noise durations `start, start + step, ...` (`n` points).
    pub fn uniform_grid(start: f64, step: f64, n: usize) -> Vec<f64> {
        (0..n).map(|k| start + k as f64 * step).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if !(self.f01_mhz > 0.0) || !self.f01_mhz.is_finite() {
            return bad(format!("f01 must be positive, got {}", self.f01_mhz));
        }
        if !(self.tau_b >= 0.0) || !(self.t_ramp >= 0.0) {
            return bad("tau_b and t_ramp must be non-negative".into());
        }
        if self.tau_n_grid.is_empty() {
            return bad("tau_n grid is empty".into());
        }
        if self
            .tau_n_grid
            .iter()
            .any(|t| !(t >= &0.0) || !t.is_finite())
        {
            return bad("tau_n values must be finite and non-negative".into());
        }
        if self.tau_n_grid.windows(2).any(|w| w[1] < w[0]) {
            return bad("tau_n grid must be sorted ascending".into());
        }
        if self.n_shots == 0 {
            return bad("n_shots must be at least 1".into());
        }
        if let Some(dt) = self.dt {
            if !(dt > 0.0) {
                return bad(format!("dt must be positive, got {dt}"));
            }
        }
        if !self.detuning_correction_mhz.is_finite() || !self.phi.is_finite() {
            return bad("phi and detuning_correction must be finite".into());
        }
        for spec in self.noise_x.iter().chain(self.noise_y.iter()) {
            spec.validate()?;
        }
        self.two_axis.validate()?;
        self.sources().map(|_| ())
    }

    /// Resolves which spec drives which axis. `None` for a zero-noise run.
    fn sources(&self) -> Result<Option<Sources>> {
        let (x, y) = (self.noise_x.as_ref(), self.noise_y.as_ref());
        if x.is_none() && y.is_none() {
            return Ok(None);
        }
        let missing = |what: &str| {
            Err(Error::NoiseRouting(format!(
                "{:?} routing needs {what}",
                self.two_axis
            )))
        };
        let src = |spec: &NoiseSpec, axis: u64| (spec.clone(), axis);
        let s = match self.two_axis {
            TwoAxisMode::XOnly => match x {
                Some(s) => Sources::X(src(s, AXIS_X)),
                None => return missing("noise_x"),
            },
            TwoAxisMode::YOnly => match y {
                Some(s) => Sources::Y(src(s, AXIS_Y)),
                None => return missing("noise_y"),
            },
            TwoAxisMode::Correlated => match (x, y) {
                (Some(s), _) => Sources::Both(src(s, AXIS_X)),
                (None, Some(s)) => Sources::Both(src(s, AXIS_Y)),
                _ => unreachable!(),
            },
            TwoAxisMode::Uncorrelated => match (x, y) {
                (Some(a), Some(b)) => Sources::Pair(src(a, AXIS_X), src(b, AXIS_Y)),
                _ => return missing("both noise_x and noise_y"),
            },
            TwoAxisMode::RotatedEnsemble(_) => match (x, y) {
                (Some(a), Some(b)) => Sources::Pair(src(a, AXIS_X), src(b, AXIS_Y)),
                (Some(a), None) => Sources::X(src(a, AXIS_X)),
                (None, Some(_)) => return missing("noise_x"),
                _ => unreachable!(),
            },
        };
        Ok(Some(s))
    }

    /// Fastest switching process among the configured sources, 1/ns.
    fn max_switching_rate(&self) -> Option<f64> {
        self.noise_x
            .iter()
            .chain(self.noise_y.iter())
            .filter_map(|s| s.switching_rate())
            .fold(None, |m: Option<f64>, r| Some(m.map_or(r, |m| m.max(r))))
    }

    /// Integration step: the override, or `default_dt` shrunk so that the
    /// first `tau_n` spacing is an integer number of steps.
    pub fn step(&self) -> f64 {
        if let Some(dt) = self.dt {
            return dt;
        }
        let dt0 = default_dt(self.omega(), self.max_switching_rate());
        match self.tau_n_grid.as_slice() {
            [a, b, ..] if b > a => {
                let s = b - a;
                s / (s / dt0).ceil()
            }
            _ => dt0,
        }
    }

    /// Lab-frame phase of the state when the noise reaches full strength
    /// (ramp midpoint), for comparison with closed forms that assume an
    /// abrupt onset.
    pub fn noise_onset_phase(&self) -> f64 {
        let dt = self.step();
        let nb = steps(self.tau_b, dt) as f64;
        let nr = steps(self.t_ramp, dt) as f64;
        self.phi + self.omega() * (nb + 0.5 * nr) * dt
    }
}

impl ProtocolConfig {
    /// Step-snapped `(tau_n, tau_total)` grids exactly as a run reports them.
    pub fn effective_grid(&self) -> Result<(Vec<f64>, Vec<f64>)> {
        let plan = Plan::new(self)?;
        Ok((plan.tau_n(), plan.tau_total()))
    }
}

/// The un-gated noise traces that drive shot `shot`, covering the longest
/// sequence (or `duration` ns when given).
pub fn noise_realisation(
    config: &ProtocolConfig,
    shot: usize,
    duration: Option<f64>,
) -> Result<(NoiseTrace, NoiseTrace)> {
    let plan = Plan::new(config)?;
    let len = match duration {
        Some(d) if d > 0.0 => ((d / plan.dt).round() as usize).max(1),
        Some(d) => {
            return Err(Error::InvalidConfig(format!(
                "duration must be positive, got {d}"
            )))
        }
        None => ((plan.span() / plan.dt).round() as usize).max(1),
    };
    let (x, y) = shot_noise(config, &config.sources()?, shot, len, plan.dt)?;
    Ok((
        NoiseTrace::new(x, plan.dt, 0.0)?,
        NoiseTrace::new(y, plan.dt, 0.0)?,
    ))
}

fn steps(t: f64, dt: f64) -> usize {
    (t / dt).round() as usize
}

#[derive(Debug, Clone)]
enum Sources {
    X((NoiseSpec, u64)),
    Y((NoiseSpec, u64)),
    Both((NoiseSpec, u64)),
    Pair((NoiseSpec, u64), (NoiseSpec, u64)),
}

/// Integer-step layout of a run.
#[derive(Debug, Clone)]
struct Plan {
    omega: f64,
    dt: f64,
    nb: usize,
    up: Vec<f64>,
    down: Vec<f64>,
    nn: Vec<usize>,
    len: usize,
}

impl Plan {
    fn new(cfg: &ProtocolConfig) -> Result<Self> {
        cfg.validate()?;
        let dt = cfg.step();
        let omega = cfg.omega();
        if dt > 2.0 * PI / omega / 200.0 * (1.0 + 1e-12) {
            return Err(Error::GridResolution(format!(
                "dt = {dt} ns exceeds tau_L / 200 = {} ns",
                2.0 * PI / omega / 200.0
            )));
        }
        let nb = steps(cfg.tau_b, dt);
        let nr = steps(cfg.t_ramp, dt);
        let nn: Vec<usize> = cfg.tau_n_grid.iter().map(|&t| steps(t, dt)).collect();
        // midpoint samples of the raised-cosine ramp
        let up: Vec<f64> = (0..nr)
            .map(|j| 0.5 * (1.0 - (PI * (j as f64 + 0.5) / nr as f64).cos()))
            .collect();
        let down: Vec<f64> = up.iter().rev().copied().collect();
        let len = nb + 2 * nr + nn.last().copied().unwrap_or(0);
        Ok(Self {
            omega,
            dt,
            nb,
            up,
            down,
            nn,
            len,
        })
    }

    fn tau_n(&self) -> Vec<f64> {
        self.nn.iter().map(|&n| n as f64 * self.dt).collect()
    }

    /// Duration of the whole sequence at the longest `tau_n`, ns.
    fn span(&self) -> f64 {
        (self.len + self.nb) as f64 * self.dt
    }

    fn tau_total(&self) -> Vec<f64> {
        self.nn
            .iter()
            .map(|&n| (2 * self.nb + 2 * self.up.len() + n) as f64 * self.dt)
            .collect()
    }

    /// Propagates one noise realisation and hands the final lab-frame state
    /// for each `tau_n` point to `sink`.
    fn run_shot(
        &self,
        rho0: &DensityMatrix,
        ex: &[f64],
        ey: &[f64],
        mut sink: impl FnMut(usize, &DensityMatrix),
    ) {
        let (omega, dt) = (self.omega, self.dt);
        let free = self.nb as f64 * dt;
        let mut rho = su2_step(rho0, omega, 0.0, 0.0, free);
        let mut k = self.nb;
        for &g in &self.up {
            rho = su2_step(&rho, omega, g * ex[k], g * ey[k], dt);
            k += 1;
        }
        let mut held = 0;
        for (p, &target) in self.nn.iter().enumerate() {
            while held < target {
                rho = su2_step(&rho, omega, ex[k], ey[k], dt);
                k += 1;
                held += 1;
            }
            let mut branch = rho;
            for (j, &g) in self.down.iter().enumerate() {
                branch = su2_step(&branch, omega, g * ex[k + j], g * ey[k + j], dt);
            }
            branch = su2_step(&branch, omega, 0.0, 0.0, free);
            sink(p, &branch);
        }
    }
}

/// Ensemble-averaged purity series over a `tau_n` grid.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleResult {
    /// Effective (step-snapped) noise durations, ns.
    pub tau_n: Vec<f64>,
    /// Total free-precession times, ns.
    pub tau_total: Vec<f64>,
    /// `tr(rho^2)` of the ensemble-averaged state.
    pub purity: Vec<f64>,
    /// `<sigma_z>^2 / 2 + 1/2` from the measured `<sigma_z>`.
    pub approx_purity: Vec<f64>,
    /// Averaged Bloch vector in the rotating frame, before any transfer pulse.
    pub bloch_mean: Vec<BlochVector>,
    /// Mean measured `<sigma_z>`.
    pub mean_z: Vec<f64>,
    /// Shot standard error of the measured `<sigma_z>`.
    pub stderr_z: Vec<f64>,
    pub shots: usize,
    pub dt: f64,
}

impl EnsembleResult {
    /// Standard error of `approx_purity` by propagation through `z^2 / 2`.
    pub fn stderr_approx(&self) -> Vec<f64> {
        self.mean_z
            .iter()
            .zip(&self.stderr_z)
            .map(|(z, s)| z.abs() * s)
            .collect()
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let err = |e: csv::Error| Error::Csv(e.to_string());
        out.write_record([
            "tau_n_ns",
            "tau_total_ns",
            "purity",
            "approx_purity",
            "bloch_x",
            "bloch_y",
            "bloch_z",
            "stderr_z",
        ])
        .map_err(err)?;
        for i in 0..self.tau_n.len() {
            let b = self.bloch_mean[i];
            out.write_record(&[
                self.tau_n[i].to_string(),
                self.tau_total[i].to_string(),
                self.purity[i].to_string(),
                self.approx_purity[i].to_string(),
                b.x.to_string(),
                b.y.to_string(),
                b.z.to_string(),
                self.stderr_z[i].to_string(),
            ])
            .map_err(err)?;
        }
        out.flush().map_err(|e| Error::Csv(e.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Kind {
    Ramsey,
    Relaxation,
}

/// Per-shot noise on both axes, before any frame rotation.
fn shot_noise(
    cfg: &ProtocolConfig,
    sources: &Option<Sources>,
    shot: usize,
    len: usize,
    dt: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let draw = |(spec, axis): &(NoiseSpec, u64)| -> Result<Vec<f64>> {
        let mut rng = rng_from(spec.seed.unwrap_or(cfg.seed), &[shot as u64, *axis]);
        Ok(spec.generate(len, dt, &mut rng)?.into_samples())
    };
    let zeros = || vec![0.0; len];
    Ok(match sources {
        None => (zeros(), zeros()),
        Some(Sources::X(s)) => (draw(s)?, zeros()),
        Some(Sources::Y(s)) => (zeros(), draw(s)?),
        Some(Sources::Both(s)) => {
            let v = draw(s)?;
            (v.clone(), v)
        }
        Some(Sources::Pair(a, b)) => (draw(a)?, draw(b)?),
    })
}

fn run(cfg: &ProtocolConfig, kind: Kind, rotations: usize) -> Result<EnsembleResult> {
    if rotations == 0 {
        return Err(Error::InvalidConfig(
            "rotation count must be at least 1".into(),
        ));
    }
    let plan = Plan::new(cfg)?;
    let sources = cfg.sources()?;
    let n_points = plan.nn.len();
    let tau_total = plan.tau_total();
    let rho0 = match kind {
        Kind::Ramsey => rotate_ideal(
            &DensityMatrix::ground(),
            [-cfg.phi.sin(), cfg.phi.cos(), 0.0],
            FRAC_PI_2,
        )?,
        Kind::Relaxation => DensityMatrix::excited(),
    };
    let delta_rate = 2.0 * PI * cfg.detuning_correction_mhz * 1e-3;
    let transfer_axes: Vec<[f64; 3]> = tau_total
        .iter()
        .map(|t| {
            let psi = cfg.phi + delta_rate * t;
            [-psi.sin(), psi.cos(), 0.0]
        })
        .collect();
    let angles: Vec<(f64, f64)> = (0..rotations)
        .map(|k| (2.0 * PI * k as f64 / rotations as f64).sin_cos())
        .collect();
    let kf = rotations as f64;

    let sums = parallel_ensemble(cfg.n_shots, n_points, |shot, sums| {
        let (ex, ey) = shot_noise(cfg, &sources, shot, plan.len, plan.dt)?;
        let mut local = StateSums::zeros(n_points);
        let mut failure = None;
        for (k, &(s, c)) in angles.iter().enumerate() {
            let rotated;
            let (rx, ry) = if k == 0 {
                (&ex, &ey)
            } else {
                rotated = ex
                    .iter()
                    .zip(&ey)
                    .map(|(&x, &y)| (c * x - s * y, s * x + c * y))
                    .unzip::<f64, f64, Vec<f64>, Vec<f64>>();
                (&rotated.0, &rotated.1)
            };
            plan.run_shot(&rho0, rx, ry, |p, rho| {
                let rot = to_rotating_frame(rho, plan.omega, tau_total[p]);
                let z = match kind {
                    Kind::Relaxation => rot.bloch().z,
                    Kind::Ramsey => match rotate_ideal(&rot, transfer_axes[p], FRAC_PI_2) {
                        Ok(after) => after.bloch().z,
                        Err(e) => {
                            failure.get_or_insert(e);
                            0.0
                        }
                    },
                };
                local.add(p, &rot, z);
            });
        }
        if let Some(e) = failure {
            return Err(e);
        }
        for p in 0..n_points {
            let mean = DensityMatrix::new_unchecked(local.rho00[p] / kf, local.rho01[p] / kf);
            sums.add(p, &mean, local.z[p] / kf);
        }
        Ok(())
    })?;

    let avg = sums.finish()?;
    let approx = avg
        .mean_z
        .iter()
        .map(|&z| approx_purity(z.clamp(-1.0, 1.0)))
        .collect::<Result<Vec<_>>>()?;
    Ok(EnsembleResult {
        tau_n: plan.tau_n(),
        tau_total,
        purity: avg.purity,
        approx_purity: approx,
        bloch_mean: avg.states.iter().map(|r| r.bloch()).collect(),
        mean_z: avg.mean_z,
        stderr_z: avg.stderr_z,
        shots: avg.shots,
        dt: plan.dt,
    })
}

/// Ramsey sequence: `pi/2` preparation to phase `phi`, gated noise, `pi/2`
/// transfer about the matching rotating-frame axis, `sigma_z` readout.
///
/// With `TwoAxisMode::RotatedEnsemble(k)` this is the `k`-rotation isotropic
/// ensemble.
pub fn run_ramsey(config: &ProtocolConfig) -> Result<EnsembleResult> {
    run(config, Kind::Ramsey, config.two_axis.rotations())
}

/// Same timeline starting from `|1>`, with `sigma_z` read out directly.
pub fn run_relaxation(config: &ProtocolConfig) -> Result<EnsembleResult> {
    run(config, Kind::Relaxation, config.two_axis.rotations())
}

/// Ramsey runs of the configured routing, each shot replicated with the noise
/// frame rotated by `2 pi k / K`; all density matrices are averaged before the
/// purity is taken. The rotation count replaces any count in `two_axis`.
pub fn run_isotropic_ensemble(config: &ProtocolConfig, k: usize) -> Result<EnsembleResult> {
    run(config, Kind::Ramsey, k)
}

/// Ramsey runs over a set of initial phases with the same noise realisations
/// for every phase.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseMap {
    /// Initial phases, rad.
    pub phi: Vec<f64>,
    pub rows: Vec<EnsembleResult>,
}

impl PhaseMap {
    /// Long-format `(phi_deg, tau_n_ns, approx_purity)` rows.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let err = |e: csv::Error| Error::Csv(e.to_string());
        out.write_record(["phi_deg", "tau_n_ns", "approx_purity"])
            .map_err(err)?;
        for (phi, row) in self.phi.iter().zip(&self.rows) {
            for (t, p) in row.tau_n.iter().zip(&row.approx_purity) {
                out.write_record(&[phi.to_degrees().to_string(), t.to_string(), p.to_string()])
                    .map_err(err)?;
            }
        }
        out.flush().map_err(|e| Error::Csv(e.to_string()))
    }
}

pub fn run_phase_sweep(config: &ProtocolConfig, phi_values: &[f64]) -> Result<PhaseMap> {
    if phi_values.is_empty() {
        return Err(Error::InvalidConfig(
            "phase sweep needs at least one phi".into(),
        ));
    }
    let rows = phi_values
        .iter()
        .map(|&phi| {
            run_ramsey(&ProtocolConfig {
                phi,
                ..config.clone()
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PhaseMap {
        phi: phi_values.to_vec(),
        rows,
    })
}
