//! Single-shot unitary propagation under classical transverse noise, ensemble
//! averaging, and a Lindblad master-equation integrator.
//!
//! Lab-frame Hamiltonian: `H = omega sigma_z / 2 + eta_x sigma_x + eta_y sigma_y`
//! (units of rad/ns, hbar = 1). Each trajectory is strictly unitary; loss of
//! purity only appears after averaging density matrices over shots.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::noise::NoiseTrace;
use crate::qubit::{DensityMatrix, Su2};

/// Time grid for a trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryGrid {
    pub dt: f64,
    pub n_steps: usize,
    /// Store every `record_stride`-th state (the initial state is always stored).
    pub record_stride: usize,
}

impl TrajectoryGrid {
    pub fn new(dt: f64, n_steps: usize, record_stride: usize) -> Result<Self> {
        let grid = Self {
            dt,
            n_steps,
            record_stride,
        };
        grid.validate()?;
        Ok(grid)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::GridResolution(format!(
                "dt must be positive, got {}",
                self.dt
            )));
        }
        if self.record_stride == 0 {
            return Err(Error::GridResolution(
                "record stride must be at least 1".into(),
            ));
        }
        Ok(())
    }

    /// Enforces `dt <= tau_L / 200` for a qubit at `omega`.
    pub fn check_larmor(&self, omega: f64) -> Result<()> {
        if omega != 0.0 {
            let limit = 2.0 * PI / omega.abs() / 200.0;
            if self.dt > limit * (1.0 + 1e-12) {
                return Err(Error::GridResolution(format!(
                    "dt = {} ns exceeds tau_L/200 = {limit} ns",
                    self.dt
                )));
            }
        }
        Ok(())
    }

    /// Times of the recorded states.
    pub fn record_times(&self) -> Vec<f64> {
        (0..=self.n_steps)
            .step_by(self.record_stride)
            .map(|k| k as f64 * self.dt)
            .collect()
    }

    pub fn n_records(&self) -> usize {
        self.n_steps / self.record_stride + 1
    }
}

/// Default step: resolve both the Larmor period and the fastest switching
/// process, `min(tau_L / 200, 1 / (20 max_rate))`.
pub fn default_dt(omega: f64, max_switching_rate: Option<f64>) -> f64 {
    let larmor = 2.0 * PI / omega.abs() / 200.0;
    match max_switching_rate {
        Some(r) if r > 0.0 => larmor.min(1.0 / (20.0 * r)),
        _ => larmor,
    }
}

/// One exact step `rho -> U rho U^dagger` with
/// `U = exp(-i dt (omega sigma_z / 2 + eta_x sigma_x + eta_y sigma_y))`.
#[inline]
pub fn su2_step(rho: &DensityMatrix, omega: f64, eta_x: f64, eta_y: f64, dt: f64) -> DensityMatrix {
    rho.conjugate(&Su2::from_generator(eta_x, eta_y, 0.5 * omega, dt))
}

/// Propagates `rho0` through `grid.n_steps` steps holding the noise constant
/// over each sample.
pub fn propagate_trajectory(
    rho0: &DensityMatrix,
    omega: f64,
    eta_x: &NoiseTrace,
    eta_y: &NoiseTrace,
    grid: &TrajectoryGrid,
) -> Result<Vec<DensityMatrix>> {
    grid.validate()?;
    grid.check_larmor(omega)?;
    for (name, tr) in [("eta_x", eta_x), ("eta_y", eta_y)] {
        if (tr.dt() - grid.dt).abs() > 1e-12 * grid.dt {
            return Err(Error::GridMismatch(format!(
                "{name} has dt {} ns, grid has {} ns",
                tr.dt(),
                grid.dt
            )));
        }
        if tr.len() < grid.n_steps {
            return Err(Error::GridMismatch(format!(
                "{name} has {} samples, grid needs {}",
                tr.len(),
                grid.n_steps
            )));
        }
    }
    let (xs, ys) = (eta_x.samples(), eta_y.samples());
    let mut out = Vec::with_capacity(grid.n_records());
    let mut rho = *rho0;
    out.push(rho);
    for k in 0..grid.n_steps {
        rho = su2_step(&rho, omega, xs[k], ys[k], grid.dt);
        if (k + 1) % grid.record_stride == 0 {
            out.push(rho);
        }
    }
    Ok(out)
}

/// Running sums over shots at a fixed set of record points.
///
/// `z` is whichever `<sigma_z>` the caller measures (for Ramsey runs, the value
/// after the transfer pulse).
#[derive(Debug, Clone, PartialEq)]
pub struct StateSums {
    pub rho00: Vec<f64>,
    pub rho01: Vec<Complex64>,
    pub z: Vec<f64>,
    pub z2: Vec<f64>,
    pub count: usize,
}

impl StateSums {
    pub fn zeros(n_points: usize) -> Self {
        Self {
            rho00: vec![0.0; n_points],
            rho01: vec![Complex64::new(0.0, 0.0); n_points],
            z: vec![0.0; n_points],
            z2: vec![0.0; n_points],
            count: 0,
        }
    }

    pub fn n_points(&self) -> usize {
        self.rho00.len()
    }

    #[inline]
    pub fn add(&mut self, point: usize, rho: &DensityMatrix, z_measured: f64) {
        self.rho00[point] += rho.rho00();
        self.rho01[point] += rho.rho01();
        self.z[point] += z_measured;
        self.z2[point] += z_measured * z_measured;
    }

    pub fn merge(mut self, other: &StateSums) -> Self {
        for i in 0..self.rho00.len() {
            self.rho00[i] += other.rho00[i];
            self.rho01[i] += other.rho01[i];
            self.z[i] += other.z[i];
            self.z2[i] += other.z2[i];
        }
        self.count += other.count;
        self
    }

    /// Pairwise reduction in index order.
    pub fn pairwise(parts: &[StateSums]) -> Option<StateSums> {
        match parts.len() {
            0 => None,
            1 => Some(parts[0].clone()),
            n => {
                let (l, r) = parts.split_at(n / 2);
                Some(Self::pairwise(l)?.merge(&Self::pairwise(r)?))
            }
        }
    }

    pub fn finish(&self) -> Result<EnsembleAverage> {
        if self.count == 0 {
            return Err(Error::EmptyEnsemble);
        }
        let n = self.count as f64;
        let mut out = EnsembleAverage {
            states: Vec::with_capacity(self.n_points()),
            purity: Vec::with_capacity(self.n_points()),
            mean_z: Vec::with_capacity(self.n_points()),
            stderr_z: Vec::with_capacity(self.n_points()),
            shots: self.count,
        };
        for i in 0..self.n_points() {
            let rho = DensityMatrix::new_unchecked(self.rho00[i] / n, self.rho01[i] / n);
            out.purity.push(crate::qubit::purity(&rho));
            out.states.push(rho);
            let m = self.z[i] / n;
            out.mean_z.push(m);
            let se = if self.count > 1 {
                let var = ((self.z2[i] - n * m * m) / (n - 1.0)).max(0.0);
                (var / n).sqrt()
            } else {
                0.0
            };
            out.stderr_z.push(se);
        }
        Ok(out)
    }
}

/// Shots are grouped into fixed blocks of this size; each block is summed
/// sequentially and blocks are reduced pairwise. The partition does not depend
/// on the thread count, so results are bit-identical for any pool size.
pub const SHOT_BLOCK: usize = 64;

/// Runs `shot(i, sums)` for every shot in parallel and reduces deterministically.
pub fn parallel_ensemble<F>(n_shots: usize, n_points: usize, shot: F) -> Result<StateSums>
where
    F: Fn(usize, &mut StateSums) -> Result<()> + Sync,
{
    if n_shots == 0 {
        return Err(Error::EmptyEnsemble);
    }
    let n_blocks = n_shots.div_ceil(SHOT_BLOCK);
    let blocks: Vec<StateSums> = (0..n_blocks)
        .into_par_iter()
        .map(|b| {
            let mut sums = StateSums::zeros(n_points);
            for i in b * SHOT_BLOCK..((b + 1) * SHOT_BLOCK).min(n_shots) {
                shot(i, &mut sums)?;
                sums.count += 1;
            }
            Ok(sums)
        })
        .collect::<Result<_>>()?;
    StateSums::pairwise(&blocks).ok_or(Error::EmptyEnsemble)
}

/// Ensemble-averaged series: purity of the averaged state (not the average of
/// purities), mean `<sigma_z>` and its shot standard error.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleAverage {
    pub states: Vec<DensityMatrix>,
    pub purity: Vec<f64>,
    pub mean_z: Vec<f64>,
    pub stderr_z: Vec<f64>,
    pub shots: usize,
}

/// Averages recorded trajectories pointwise.
pub fn ensemble_average(trajectories: &[Vec<DensityMatrix>]) -> Result<EnsembleAverage> {
    let first = trajectories.first().ok_or(Error::EmptyEnsemble)?;
    let n_points = first.len();
    if let Some(bad) = trajectories.iter().position(|t| t.len() != n_points) {
        return Err(Error::GridMismatch(format!(
            "trajectory {bad} has {} records, expected {n_points}",
            trajectories[bad].len()
        )));
    }
    let blocks: Vec<StateSums> = trajectories
        .chunks(SHOT_BLOCK)
        .map(|chunk| {
            let mut s = StateSums::zeros(n_points);
            for traj in chunk {
                for (i, rho) in traj.iter().enumerate() {
                    s.add(i, rho, rho.bloch().z);
                }
                s.count += 1;
            }
            s
        })
        .collect();
    StateSums::pairwise(&blocks)
        .ok_or(Error::EmptyEnsemble)?
        .finish()
}

/// Lindblad model with one transverse jump operator
/// `L = cos(theta) sigma_x + sin(theta) sigma_y` at rate `gamma`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LindbladParams {
    pub omega: f64,
    pub gamma: f64,
    pub theta: f64,
}

/// Hermitian jump operator `L = axis . sigma` with dissipation rate `rate`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JumpOperator {
    pub rate: f64,
    pub axis: [f64; 3],
}

impl LindbladParams {
    pub fn jumps(&self) -> Vec<JumpOperator> {
        vec![JumpOperator {
            rate: self.gamma,
            axis: [self.theta.cos(), self.theta.sin(), 0.0],
        }]
    }
}

type Mat2 = [[Complex64; 2]; 2];

fn pauli(axis: [f64; 3]) -> Mat2 {
    let c = Complex64::new;
    [
        [c(axis[2], 0.0), c(axis[0], -axis[1])],
        [c(axis[0], axis[1]), c(-axis[2], 0.0)],
    ]
}

fn mul(a: &Mat2, b: &Mat2) -> Mat2 {
    let mut out = [[Complex64::new(0.0, 0.0); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    out
}

fn dagger(a: &Mat2) -> Mat2 {
    [
        [a[0][0].conj(), a[1][0].conj()],
        [a[0][1].conj(), a[1][1].conj()],
    ]
}

fn combine(a: &Mat2, b: &Mat2, f: impl Fn(Complex64, Complex64) -> Complex64) -> Mat2 {
    [
        [f(a[0][0], b[0][0]), f(a[0][1], b[0][1])],
        [f(a[1][0], b[1][0]), f(a[1][1], b[1][1])],
    ]
}

/// Lindblad right-hand side on the real state `(rho00, Re rho01, Im rho01)`.
fn lindblad_rhs(h: &Mat2, jumps: &[(f64, Mat2)], y: [f64; 3]) -> [f64; 3] {
    let rho = DensityMatrix::new_unchecked(y[0], Complex64::new(y[1], y[2])).to_matrix();
    let mi = Complex64::new(0.0, -1.0);
    let comm = combine(&mul(h, &rho), &mul(&rho, h), |a, b| mi * (a - b));
    let mut d = comm;
    for (rate, l) in jumps {
        let ld = dagger(l);
        let jump = mul(&mul(l, &rho), &ld);
        let ldl = mul(&ld, l);
        let anti = combine(&mul(&ldl, &rho), &mul(&rho, &ldl), |a, b| a + b);
        let term = combine(&jump, &anti, |a, b| a - 0.5 * b);
        d = combine(&d, &term, |a, b| a + *rate * b);
    }
    [d[0][0].re, d[0][1].re, d[0][1].im]
}

/// Integrates the single-jump model with fixed-step RK4.
pub fn lindblad_evolve(
    rho0: &DensityMatrix,
    params: &LindbladParams,
    grid: &TrajectoryGrid,
) -> Result<Vec<DensityMatrix>> {
    lindblad_evolve_jumps(rho0, params.omega, &params.jumps(), grid)
}

/// Integrates `drho/dt = -i[H, rho] + sum_k rate_k (L rho L^dag - {L^dag L, rho}/2)`
/// with `H = omega sigma_z / 2` using fixed-step RK4.
pub fn lindblad_evolve_jumps(
    rho0: &DensityMatrix,
    omega: f64,
    jumps: &[JumpOperator],
    grid: &TrajectoryGrid,
) -> Result<Vec<DensityMatrix>> {
    grid.validate()?;
    if let Some(j) = jumps.iter().find(|j| !(j.rate >= 0.0)) {
        return Err(Error::InvalidConfig(format!(
            "negative dissipation rate {}",
            j.rate
        )));
    }
    let total_rate: f64 = jumps.iter().map(|j| j.rate).sum();
    if total_rate * grid.dt > 0.01 {
        return Err(Error::StepSize(total_rate * grid.dt));
    }
    let h = pauli([0.0, 0.0, 0.5 * omega]);
    let ops: Vec<(f64, Mat2)> = jumps.iter().map(|j| (j.rate, pauli(j.axis))).collect();
    let f = |y: [f64; 3]| lindblad_rhs(&h, &ops, y);
    let axpy =
        |y: [f64; 3], k: [f64; 3], s: f64| [y[0] + s * k[0], y[1] + s * k[1], y[2] + s * k[2]];

    let dt = grid.dt;
    let mut y = [rho0.rho00(), rho0.rho01().re, rho0.rho01().im];
    let to_rho = |y: [f64; 3]| DensityMatrix::new_unchecked(y[0], Complex64::new(y[1], y[2]));
    let mut out = Vec::with_capacity(grid.n_records());
    out.push(to_rho(y));
    for k in 0..grid.n_steps {
        let k1 = f(y);
        let k2 = f(axpy(y, k1, 0.5 * dt));
        let k3 = f(axpy(y, k2, 0.5 * dt));
        let k4 = f(axpy(y, k3, dt));
        for i in 0..3 {
            y[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        if (k + 1) % grid.record_stride == 0 {
            out.push(to_rho(y));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qubit::{purity, BlochVector};
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn full_larmor_period_is_identity() {
        let rho = DensityMatrix::from_bloch(BlochVector::new(0.3, 0.5, -0.4)).unwrap();
        let omega = 1.531;
        let r = su2_step(&rho, omega, 0.0, 0.0, 2.0 * PI / omega);
        assert!((r.rho00() - rho.rho00()).abs() < 1e-14);
        assert!((r.rho01() - rho.rho01()).norm() < 1e-14);
    }

    #[test]
    fn resonant_flip_about_x() {
        // exp(-i (pi/2) sigma_x) |0> = -i |1>
        let eta = 0.8;
        let r = su2_step(&DensityMatrix::ground(), 0.0, eta, 0.0, FRAC_PI_2 / eta);
        let b = r.bloch();
        assert!((b.z + 1.0).abs() < 1e-14 && b.x.abs() < 1e-14 && b.y.abs() < 1e-14);
    }

    #[test]
    fn grid_and_trace_validation() {
        let tr = NoiseTrace::zeros(10, 0.01, 0.0).unwrap();
        let grid = TrajectoryGrid::new(0.01, 20, 1).unwrap();
        assert!(matches!(
            propagate_trajectory(&DensityMatrix::ground(), 1.0, &tr, &tr, &grid),
            Err(Error::GridMismatch(_))
        ));
        let other = NoiseTrace::zeros(20, 0.02, 0.0).unwrap();
        let grid = TrajectoryGrid::new(0.02, 20, 1).unwrap();
        assert!(matches!(
            propagate_trajectory(&DensityMatrix::ground(), 1.0, &tr, &other, &grid),
            Err(Error::GridMismatch(_))
        ));
        // dt too coarse for the Larmor period
        let grid = TrajectoryGrid::new(0.02, 20, 1).unwrap();
        assert!(matches!(
            propagate_trajectory(&DensityMatrix::ground(), 2.0, &other, &other, &grid),
            Err(Error::GridResolution(_))
        ));
        assert!(TrajectoryGrid::new(0.0, 1, 1).is_err());
        assert!(TrajectoryGrid::new(0.1, 1, 0).is_err());
    }

    #[test]
    fn record_stride() {
        let grid = TrajectoryGrid::new(0.01, 10, 3).unwrap();
        let tr = NoiseTrace::zeros(10, 0.01, 0.0).unwrap();
        let out =
            propagate_trajectory(&DensityMatrix::equatorial(0.0), 1.0, &tr, &tr, &grid).unwrap();
        assert_eq!(out.len(), 4);
        assert_eq!(grid.record_times(), vec![0.0, 0.03, 0.06, 0.09]);
    }

    #[test]
    fn ensemble_examples() {
        let rho = DensityMatrix::from_bloch(BlochVector::new(0.2, 0.3, 0.1)).unwrap();
        let single = ensemble_average(&[vec![rho]]).unwrap();
        assert!((single.purity[0] - purity(&rho)).abs() < 1e-15);
        assert_eq!(single.stderr_z[0], 0.0);

        let a = DensityMatrix::equatorial(0.4);
        let b = DensityMatrix::equatorial(0.4 + PI);
        let avg = ensemble_average(&[vec![a], vec![b]]).unwrap();
        assert!((avg.purity[0] - 0.5).abs() < 1e-15);

        assert!(matches!(ensemble_average(&[]), Err(Error::EmptyEnsemble)));
        assert!(matches!(
            ensemble_average(&[vec![a], vec![a, b]]),
            Err(Error::GridMismatch(_))
        ));
    }

    #[test]
    fn identical_trajectories_keep_purity() {
        let rho = DensityMatrix::from_bloch(BlochVector::new(0.5, -0.1, 0.6)).unwrap();
        let trajs = vec![vec![rho, DensityMatrix::equatorial(1.0)]; 200];
        let avg = ensemble_average(&trajs).unwrap();
        assert!((avg.purity[0] - purity(&rho)).abs() < 1e-12);
        assert!((avg.purity[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn two_point_quasistatic_average() {
        // +-eta quasistatic noise along y from the x-axis state; exact two-branch average
        let (omega, eta, t) = (1.5, 0.2, 3.7);
        let rho0 = DensityMatrix::equatorial(0.0);
        let grid = TrajectoryGrid::new(t / 1000.0, 1000, 1000).unwrap();
        let branches: Vec<Vec<DensityMatrix>> = [eta, -eta]
            .iter()
            .map(|&e| {
                let zx = NoiseTrace::zeros(1000, grid.dt, 0.0).unwrap();
                let ey = NoiseTrace::new(vec![e; 1000], grid.dt, 0.0).unwrap();
                propagate_trajectory(&rho0, omega, &zx, &ey, &grid).unwrap()
            })
            .collect();
        let avg = ensemble_average(&branches).unwrap();

        // Bloch-vector rotation about Omega = (0, 2 eta, omega) for each branch (Rodrigues)
        let branch = |e: f64| {
            let om = (omega * omega + 4.0 * e * e).sqrt();
            let n = [0.0, 2.0 * e / om, omega / om];
            let s0 = [1.0, 0.0, 0.0];
            let (s, c) = (om * t).sin_cos();
            let ndot = n[0] * s0[0] + n[1] * s0[1] + n[2] * s0[2];
            let cross = [
                n[1] * s0[2] - n[2] * s0[1],
                n[2] * s0[0] - n[0] * s0[2],
                n[0] * s0[1] - n[1] * s0[0],
            ];
            [0, 1, 2].map(|i| s0[i] * c + cross[i] * s + n[i] * ndot * (1.0 - c))
        };
        let (p, m) = (branch(eta), branch(-eta));
        let mean = [0, 1, 2].map(|i| 0.5 * (p[i] + m[i]));
        let expect = 0.5 + 0.5 * (mean[0] * mean[0] + mean[1] * mean[1] + mean[2] * mean[2]);
        assert!(
            (avg.purity[1] - expect).abs() < 1e-12,
            "{} vs {expect}",
            avg.purity[1]
        );
    }

    #[test]
    fn lindblad_step_size_guard() {
        let params = LindbladParams {
            omega: 1.0,
            gamma: 1.0,
            theta: 0.0,
        };
        let grid = TrajectoryGrid::new(0.02, 10, 1).unwrap();
        assert!(matches!(
            lindblad_evolve(&DensityMatrix::ground(), &params, &grid),
            Err(Error::StepSize(_))
        ));
    }

    #[test]
    fn lindblad_without_dissipation_is_unitary() {
        let omega = 1.531;
        let params = LindbladParams {
            omega,
            gamma: 0.0,
            theta: 0.3,
        };
        let dt = 2.0 * PI / omega / 2000.0;
        let grid = TrajectoryGrid::new(dt, 20_000, 500).unwrap();
        let rho0 = DensityMatrix::from_bloch(BlochVector::new(0.6, 0.0, 0.8)).unwrap();
        let me = lindblad_evolve(&rho0, &params, &grid).unwrap();
        for (i, rho) in me.iter().enumerate() {
            let t = i as f64 * 500.0 * dt;
            let exact = su2_step(&rho0, omega, 0.0, 0.0, t);
            assert!((rho.rho00() - exact.rho00()).abs() < 1e-9);
            assert!((rho.rho01() - exact.rho01()).norm() < 1e-9);
        }
    }
}
