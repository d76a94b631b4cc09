//! Closed-form purity predictions for quasistatic and Markovian transverse
//! noise.
//!
//! These are leading-order expansions (in `<eta^2>/omega^2` or `Gamma t`) and
//! are pure arithmetic: nothing here depends on the propagators in
//! [`crate::dynamics`], so the two can check each other.
//!
//! # Angle conventions
//!
//! The formulas are written in the frame where Larmor precession runs
//! clockwise about z (lab Hamiltonian `-omega sigma_z / 2`). The simulator uses
//! `+omega sigma_z / 2`, where precession runs counter-clockwise. Reflecting
//! the sense of precession maps every in-plane angle `a -> -a`, so:
//!
//! * a simulated Ramsey run with initial phase `phi` (state
//!   `(|0> + e^{i phi}|1>)/sqrt 2`, noise along `sigma_y`) is predicted by
//!   [`quasistatic_ramsey_purity`] at `oracle_phase(phi)`;
//! * a simulated Lindblad run with jump axis at angle `theta` from x is
//!   predicted by [`lindblad_ramsey_purity`] at `oracle_angle(theta)`.
//!
//! Both maps are checked against Monte Carlo and RK4 runs in the tests.

use crate::error::{Error, Result};

/// Parameters shared by the closed forms.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct OracleParams {
    /// Qubit angular frequency, rad/ns.
    pub omega: f64,
    /// Quasistatic variance `<eta^2>`, (rad/ns)^2.
    pub eta_var: f64,
    /// Lindblad rate, 1/ns.
    pub gamma: f64,
    /// Noise axis angle, rad.
    pub theta: f64,
    /// Initial superposition phase, rad.
    pub phi: f64,
}

impl OracleParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.eta_var >= 0.0) || !(self.gamma >= 0.0) {
            return Err(Error::InvalidConfig(
                "eta_var and gamma must be non-negative".into(),
            ));
        }
        Ok(())
    }

    /// Non-fatal notes for parameters outside the perturbative regime, given
    /// the longest time `t_max` the formulas will be evaluated at.
    pub fn warnings(&self, t_max: f64) -> Vec<String> {
        let mut out = Vec::new();
        if self.omega != 0.0 {
            let ratio = self.eta_var / (self.omega * self.omega);
            if ratio > 0.25 {
                out.push(format!(
                    "<eta^2>/omega^2 = {ratio:.4} is far outside the perturbative regime (> 0.25)"
                ));
            } else if ratio > 0.01 {
                out.push(format!(
                    "<eta^2>/omega^2 = {ratio:.4} exceeds 0.01; quasistatic formulas lose accuracy"
                ));
            }
        }
        let gt = self.gamma * t_max;
        if gt > 0.2 {
            out.push(format!(
                "Gamma t = {gt:.3} exceeds 0.2; first-order Lindblad purity is invalid"
            ));
        } else if gt > 0.05 {
            out.push(format!(
                "Gamma t = {gt:.3} exceeds 0.05; first-order Lindblad purity loses accuracy"
            ));
        }
        out
    }
}

/// Maps the simulator's initial phase onto the phase used by the closed forms.
#[inline]
pub fn oracle_phase(phi: f64) -> f64 {
    -phi
}

/// Maps a simulator in-plane axis angle onto the angle used by the closed forms.
#[inline]
pub fn oracle_angle(theta: f64) -> f64 {
    -theta
}

/// Noise-axis angle relative to an initial state of phase `phi`, `theta = pi/2 - phi`.
#[inline]
pub fn theta_from_phi(phi: f64) -> f64 {
    std::f64::consts::FRAC_PI_2 - phi
}

/// Ramsey purity for quasistatic noise along `sigma_y`:
/// `1 - (2 <eta^2> / omega^2) (sin phi + sin(omega t - phi))^2`.
pub fn quasistatic_ramsey_purity(eta_var: f64, omega: f64, phi: f64, t: f64) -> f64 {
    let s = phi.sin() + (omega * t - phi).sin();
    1.0 - 2.0 * eta_var / (omega * omega) * s * s
}

/// The same prediction parameterised by the noise-axis angle:
/// `1 - (2 <eta^2> / omega^2) (cos theta - cos(omega t + theta))^2`.
pub fn quasistatic_ramsey_purity_theta(eta_var: f64, omega: f64, theta: f64, t: f64) -> f64 {
    let s = theta.cos() - (omega * t + theta).cos();
    1.0 - 2.0 * eta_var / (omega * omega) * s * s
}

/// First-order Ramsey purity for a single transverse jump operator:
/// `1 - Gamma t - (Gamma / 2 omega) (sin 2 theta - sin(2 theta + 2 omega t))`.
pub fn lindblad_ramsey_purity(gamma: f64, omega: f64, theta: f64, t: f64) -> f64 {
    1.0 - gamma * t
        - gamma / (2.0 * omega) * ((2.0 * theta).sin() - (2.0 * theta + 2.0 * omega * t).sin())
}

/// Time derivative of [`lindblad_ramsey_purity`], `-Gamma + Gamma cos(2 theta + 2 omega t)`.
pub fn lindblad_ramsey_purity_rate(gamma: f64, omega: f64, theta: f64, t: f64) -> f64 {
    -gamma + gamma * (2.0 * theta + 2.0 * omega * t).cos()
}

/// Purity after preparing `|1>` under quasistatic transverse noise:
/// `1 - (4 <eta^2> / omega^2) (1 - cos omega t)`. Independent of the noise axis.
pub fn quasistatic_relaxation_purity(eta_var: f64, omega: f64, t: f64) -> f64 {
    1.0 - 4.0 * eta_var / (omega * omega) * (1.0 - (omega * t).cos())
}

/// Purity for isotropic Markovian transverse noise, `(1 + exp(-2 Gamma t)) / 2`.
pub fn isotropic_lindblad_purity(gamma: f64, t: f64) -> f64 {
    0.5 * (1.0 + (-2.0 * gamma * t).exp())
}

/// Time for a `pi` phase difference to build up between the noisy orbit
/// (frequency `sqrt(omega^2 + 4 eta^2)`) and the bare one: `pi omega / (2 eta^2)`.
pub fn damping_time_estimate(omega: f64, eta: f64) -> Result<f64> {
    if eta == 0.0 {
        return Err(Error::DivergentEstimate);
    }
    Ok(std::f64::consts::PI * omega / (2.0 * eta * eta))
}
