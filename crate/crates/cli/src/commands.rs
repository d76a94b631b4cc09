use std::f64::consts::FRAC_PI_4;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use purity_core::noise::NoiseSpec;
use purity_core::oracles::{
    isotropic_lindblad_purity, lindblad_ramsey_purity, quasistatic_ramsey_purity_theta,
    quasistatic_relaxation_purity, OracleParams,
};
use purity_core::protocols::{
    noise_realisation, run_isotropic_ensemble, run_phase_sweep, run_ramsey, run_relaxation,
    EnsembleResult, ProtocolConfig,
};
use purity_core::spectral::{dominant_peak, periodogram, welch_psd, Psd};
use purity_core::units::mhz_to_rad_per_ns;

use crate::config::{Config, Routing};
use crate::manifest::{file_sha256, OutputFile, RunManifest};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Ramsey,
    Relaxation,
    PhaseSweep,
    Isotropic,
    Psd,
    Oracle,
    NoiseGen,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Ramsey => "ramsey",
            Command::Relaxation => "relaxation",
            Command::PhaseSweep => "phase-sweep",
            Command::Isotropic => "isotropic",
            Command::Psd => "psd",
            Command::Oracle => "oracle",
            Command::NoiseGen => "noise-gen",
        }
    }
}

fn out_path(cfg: &Config, stem: &str, ext: &str) -> PathBuf {
    cfg.output
        .dir
        .join(format!("{}{stem}.{ext}", cfg.output.prefix))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

fn core<T>(r: purity_core::Result<T>) -> Result<T> {
    r.map_err(|e| anyhow!("{e}"))
}

/// Noise axes as `(angle from x, quasistatic variance)` for the configured
/// routing. Correlated noise lies along `x + y` with twice the per-axis power.
fn noise_axes(cfg: &Config) -> Vec<(f64, f64)> {
    let var = |s: &Option<NoiseSpec>| s.as_ref().map(|s| s.variance());
    let (vx, vy) = (var(&cfg.noise.x), var(&cfg.noise.y));
    match cfg.noise.two_axis {
        Routing::XOnly => vx.map(|v| vec![(0.0, v)]).unwrap_or_default(),
        Routing::YOnly => vy
            .map(|v| vec![(std::f64::consts::FRAC_PI_2, v)])
            .unwrap_or_default(),
        Routing::Correlated => vx
            .or(vy)
            .map(|v| vec![(FRAC_PI_4, 2.0 * v)])
            .unwrap_or_default(),
        Routing::Uncorrelated => vx
            .map(|v| (0.0, v))
            .into_iter()
            .chain(vy.map(|v| (std::f64::consts::FRAC_PI_2, v)))
            .collect(),
    }
}

/// Perturbative-regime warnings for the configured noise.
pub fn physics_warnings(cfg: &Config) -> Vec<String> {
    let pc = cfg.protocol_config();
    let omega = pc.omega();
    let t_max = pc.tau_n_grid.last().copied().unwrap_or(0.0);
    let eta_var = noise_axes(cfg).iter().map(|(_, v)| v).sum();
    OracleParams {
        omega,
        eta_var,
        gamma: mhz_to_rad_per_ns(cfg.oracle.gamma_mhz),
        ..Default::default()
    }
    .warnings(t_max)
}

fn write_result(cfg: &Config, stem: &str, r: &EnsembleResult) -> Result<PathBuf> {
    let path = out_path(cfg, stem, "csv");
    core(r.write_csv(create(&path)?))?;
    Ok(path)
}

fn uniform_step(t: &[f64]) -> Result<f64> {
    if t.len() < 2 {
        bail!("a spectrum needs at least two tau_n points");
    }
    let step = t[1] - t[0];
    if !(step > 0.0)
        || t.windows(2)
            .any(|w| ((w[1] - w[0]) - step).abs() > 1e-6 * step)
    {
        bail!("a spectrum needs a uniform tau_n grid");
    }
    Ok(step)
}

fn read_series(path: &Path, column: &str) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut rdr =
        csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    let headers = rdr.headers()?.clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| anyhow!("{} has no `{name}` column", path.display()))
    };
    let (it, iv) = (find("tau_n_ns")?, find(column)?);
    let (mut t, mut v) = (Vec::new(), Vec::new());
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let parse = |i: usize| -> Result<f64> {
            rec[i]
                .trim()
                .parse()
                .with_context(|| format!("{} row {}", path.display(), row + 2))
        };
        t.push(parse(it)?);
        v.push(parse(iv)?);
    }
    Ok((t, v))
}

fn spectrum(cfg: &Config, t: &[f64], v: &[f64]) -> Result<Psd> {
    let step = uniform_step(t)?;
    let p = &cfg.psd;
    core(match p.segment_length {
        Some(seg) => welch_psd(v, step, seg, p.overlap, p.window, p.detrend),
        None => periodogram(v, step, p.detrend),
    })
}

fn oracle_csv(cfg: &Config, path: &Path) -> Result<()> {
    let pc = cfg.protocol_config();
    let (tau_n, tau_total) = core(pc.effective_grid())?;
    let omega = pc.omega();
    let onset = pc.noise_onset_phase();
    let axes = noise_axes(cfg);
    let gamma = mhz_to_rad_per_ns(cfg.oracle.gamma_mhz);
    // closed forms run with precession reflected: an angle a maps to -a,
    // so the relative angle between state and axis enters as onset - axis
    let theta_jump = onset - cfg.oracle.jump_axis_deg.to_radians();

    let mut out = csv::Writer::from_writer(create(path)?);
    out.write_record([
        "tau_n_ns",
        "tau_total_ns",
        "quasistatic_ramsey",
        "quasistatic_relaxation",
        "lindblad_ramsey",
        "isotropic_lindblad",
    ])?;
    for (&t, &tt) in tau_n.iter().zip(&tau_total) {
        let ramsey = 1.0
            - axes
                .iter()
                .map(|&(a, v)| 1.0 - quasistatic_ramsey_purity_theta(v, omega, onset - a, t))
                .sum::<f64>();
        let relax = 1.0
            - axes
                .iter()
                .map(|&(_, v)| 1.0 - quasistatic_relaxation_purity(v, omega, t))
                .sum::<f64>();
        let lindblad = lindblad_ramsey_purity(gamma, omega, theta_jump, t);
        let iso = isotropic_lindblad_purity(gamma, t);
        out.write_record(&[
            t.to_string(),
            tt.to_string(),
            ramsey.to_string(),
            relax.to_string(),
            lindblad.to_string(),
            iso.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// Runs one subcommand inside a pool of `threads` workers and writes its
/// outputs plus the manifest. Returns the manifest.
pub fn execute(cmd: Command, cfg: &Config, threads: usize) -> Result<(RunManifest, PathBuf)> {
    cfg.check()?;
    for w in physics_warnings(cfg) {
        log::warn!("{w}");
    }
    std::fs::create_dir_all(&cfg.output.dir)
        .with_context(|| format!("creating output directory {}", cfg.output.dir.display()))?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .context("building worker pool")?;
    let pc: ProtocolConfig = cfg.protocol_config();
    let start = Instant::now();

    let (outputs, shots): (Vec<PathBuf>, usize) = pool.install(|| -> Result<_> {
        Ok(match cmd {
            Command::Ramsey => (
                vec![write_result(cfg, "ramsey", &core(run_ramsey(&pc))?)?],
                cfg.shots,
            ),
            Command::Relaxation => (
                vec![write_result(
                    cfg,
                    "relaxation",
                    &core(run_relaxation(&pc))?,
                )?],
                cfg.shots,
            ),
            Command::Isotropic => {
                let r = core(run_isotropic_ensemble(&pc, cfg.noise.rotations))?;
                (
                    vec![write_result(cfg, "isotropic", &r)?],
                    cfg.shots * cfg.noise.rotations,
                )
            }
            Command::PhaseSweep => {
                let phis: Vec<f64> = cfg
                    .protocol
                    .phi_sweep_deg
                    .iter()
                    .map(|d| d.to_radians())
                    .collect();
                let map = core(run_phase_sweep(&pc, &phis))?;
                let path = out_path(cfg, "phase_sweep", "csv");
                core(map.write_csv(create(&path)?))?;
                (vec![path], cfg.shots * phis.len())
            }
            Command::Psd => {
                let column = cfg.psd.series.column();
                let ((t, v), shots) = match &cfg.psd.input {
                    Some(input) => (read_series(input, column)?, 0),
                    None => {
                        let r = core(run_ramsey(&pc))?;
                        let v = match cfg.psd.series {
                            crate::config::Series::Purity => r.purity.clone(),
                            crate::config::Series::ApproxPurity => r.approx_purity.clone(),
                        };
                        ((r.tau_n, v), cfg.shots)
                    }
                };
                let psd = spectrum(cfg, &t, &v)?;
                let band = cfg
                    .psd
                    .band_mhz
                    .map(|[a, b]| (a, b))
                    .unwrap_or((0.0, f64::INFINITY));
                match dominant_peak(&psd, band) {
                    Ok(p) => println!(
                        "dominant peak: {:.3} MHz (bin resolution {:.3} MHz; 2 f01 = {:.3} MHz)",
                        p.freq,
                        psd.resolution,
                        2.0 * cfg.qubit.f01_mhz
                    ),
                    Err(e) => log::warn!("no peak: {e}"),
                }
                let path = out_path(cfg, "psd", "csv");
                core(psd.write_csv(create(&path)?))?;
                (vec![path], shots)
            }
            Command::Oracle => {
                let path = out_path(cfg, "oracle", "csv");
                oracle_csv(cfg, &path)?;
                (vec![path], 0)
            }
            Command::NoiseGen => {
                let (x, y) = core(noise_realisation(
                    &pc,
                    cfg.noise_gen.shot,
                    cfg.noise_gen.duration_ns,
                ))?;
                let px = out_path(cfg, "noise_x", "csv");
                let py = out_path(cfg, "noise_y", "csv");
                core(x.write_csv(create(&px)?))?;
                core(y.write_csv(create(&py)?))?;
                (vec![px, py], 1)
            }
        })
    })?;

    let elapsed = start.elapsed().as_secs_f64();
    let manifest = RunManifest {
        command: cmd.name().to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        config_digest: cfg.digest(),
        seed: cfg.seed,
        threads,
        shots,
        wall_clock_s: elapsed,
        shots_per_second: if elapsed > 0.0 {
            shots as f64 / elapsed
        } else {
            0.0
        },
        outputs: outputs
            .iter()
            .map(|p| {
                Ok(OutputFile {
                    path: p.clone(),
                    sha256: file_sha256(p)?,
                })
            })
            .collect::<Result<_>>()?,
    };
    let mpath = out_path(cfg, &cmd.name().replace('-', "_"), "manifest.toml");
    manifest.write(&mpath)?;
    Ok((manifest, mpath))
}
