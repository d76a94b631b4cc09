//! Two-level state algebra: density matrices, Bloch vectors, purity measures,
//! ideal rotations and the rotating-frame transform.
//!
//! Pauli conventions: `sigma_z |0> = |0>`, so `|0><0|` has Bloch vector
//! `(0, 0, 1)` and `rho = (I + x sigma_x + y sigma_y + z sigma_z) / 2`.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Numerical slack used by the state-validity checks.
pub const STATE_EPS: f64 = 1e-12;

/// A single-qubit density matrix stored as `(rho00, Re rho01, Im rho01)`.
///
/// Trace and Hermiticity hold by construction; `rho11 = 1 - rho00` and
/// `rho10 = conj(rho01)` are implied.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityMatrix {
    rho00: f64,
    rho01: Complex64,
}

/// Expectation values `(<sigma_x>, <sigma_y>, <sigma_z>)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BlochVector {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl BlochVector {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn norm_sqr(&self) -> f64 {
        self.x * self.x + self.y * self.y + self.z * self.z
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn dot(&self, other: &BlochVector) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }
}

impl DensityMatrix {
    /// Builds a state from its independent entries, checking positivity.
    pub fn new(rho00: f64, rho01: Complex64) -> Result<Self> {
        let rho = Self::new_unchecked(rho00, rho01);
        rho.validate()?;
        Ok(rho)
    }

    /// Builds a state without the positivity check. Used on hot paths where
    /// the state comes out of a unitary or a convex combination.
    #[inline]
    pub const fn new_unchecked(rho00: f64, rho01: Complex64) -> Self {
        Self { rho00, rho01 }
    }

    /// `|0><0|`.
    pub const fn ground() -> Self {
        Self::new_unchecked(1.0, Complex64::new(0.0, 0.0))
    }

    /// `|1><1|`.
    pub const fn excited() -> Self {
        Self::new_unchecked(0.0, Complex64::new(0.0, 0.0))
    }

    /// `I / 2`.
    pub const fn maximally_mixed() -> Self {
        Self::new_unchecked(0.5, Complex64::new(0.0, 0.0))
    }

    /// `(|0> + e^{i phi} |1>) / sqrt(2)`, Bloch vector `(cos phi, sin phi, 0)`.
    pub fn equatorial(phi: f64) -> Self {
        Self::new_unchecked(0.5, Complex64::new(0.5 * phi.cos(), -0.5 * phi.sin()))
    }

    pub fn from_bloch(b: BlochVector) -> Result<Self> {
        let n = b.norm_sqr();
        if n > 1.0 + STATE_EPS {
            return Err(Error::InvalidState(format!(
                "Bloch vector length^2 {n} exceeds 1"
            )));
        }
        Ok(Self::from_bloch_unchecked(b))
    }

    #[inline]
    pub fn from_bloch_unchecked(b: BlochVector) -> Self {
        Self::new_unchecked(0.5 * (1.0 + b.z), Complex64::new(0.5 * b.x, -0.5 * b.y))
    }

    #[inline]
    pub fn rho00(&self) -> f64 {
        self.rho00
    }

    #[inline]
    pub fn rho11(&self) -> f64 {
        1.0 - self.rho00
    }

    #[inline]
    pub fn rho01(&self) -> Complex64 {
        self.rho01
    }

    #[inline]
    pub fn rho10(&self) -> Complex64 {
        self.rho01.conj()
    }

    /// Full matrix, row major.
    pub fn to_matrix(&self) -> [[Complex64; 2]; 2] {
        [
            [Complex64::new(self.rho00, 0.0), self.rho01],
            [self.rho01.conj(), Complex64::new(1.0 - self.rho00, 0.0)],
        ]
    }

    /// Reads back a matrix, keeping only the independent entries.
    pub fn from_matrix_unchecked(m: &[[Complex64; 2]; 2]) -> Self {
        Self::new_unchecked(m[0][0].re, m[0][1])
    }

    #[inline]
    pub fn bloch(&self) -> BlochVector {
        BlochVector {
            x: 2.0 * self.rho01.re,
            y: -2.0 * self.rho01.im,
            z: 2.0 * self.rho00 - 1.0,
        }
    }

    /// Checks the positivity constraint `rho00 (1 - rho00) >= |rho01|^2`.
    pub fn validate(&self) -> Result<()> {
        if !self.rho00.is_finite() || !self.rho01.re.is_finite() || !self.rho01.im.is_finite() {
            return Err(Error::InvalidState("non-finite entry".into()));
        }
        if self.rho00 < -STATE_EPS || self.rho00 > 1.0 + STATE_EPS {
            return Err(Error::InvalidState(format!(
                "population {} outside [0, 1]",
                self.rho00
            )));
        }
        let det = self.rho00 * (1.0 - self.rho00) - self.rho01.norm_sqr();
        if det < -STATE_EPS {
            return Err(Error::InvalidState(format!("negative determinant {det}")));
        }
        Ok(())
    }

    /// `U rho U^dagger`.
    #[inline]
    pub fn conjugate(&self, u: &Su2) -> Self {
        let (a, b) = (u.a, u.b);
        let p = self.rho00;
        let c = self.rho01;
        let rho00 = a.norm_sqr() * p + b.norm_sqr() * (1.0 - p) - 2.0 * (a * b * c).re;
        let rho01 = a * b.conj() * (2.0 * p - 1.0) + a * a * c - b.conj() * b.conj() * c.conj();
        Self::new_unchecked(rho00, rho01)
    }

    /// `tr(rho^2)` evaluated from the matrix entries.
    #[inline]
    pub fn purity(&self) -> f64 {
        let p = self.rho00;
        p * p + (1.0 - p) * (1.0 - p) + 2.0 * self.rho01.norm_sqr()
    }
}

/// An SU(2) element `[[a, -conj(b)], [b, conj(a)]]` with `|a|^2 + |b|^2 = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Su2 {
    pub a: Complex64,
    pub b: Complex64,
}

impl Su2 {
    pub const IDENTITY: Su2 = Su2 {
        a: Complex64::new(1.0, 0.0),
        b: Complex64::new(0.0, 0.0),
    };

    /// `exp(-i t (g . sigma))` in closed form.
    #[inline]
    pub fn from_generator(gx: f64, gy: f64, gz: f64, t: f64) -> Self {
        let mag = (gx * gx + gy * gy + gz * gz).sqrt();
        if mag == 0.0 {
            return Self::IDENTITY;
        }
        let (s, c) = (mag * t).sin_cos();
        let k = s / mag;
        Su2 {
            a: Complex64::new(c, -k * gz),
            b: Complex64::new(k * gy, -k * gx),
        }
    }

    /// Rotation of the Bloch vector by `angle` about the unit vector `axis`,
    /// `exp(-i angle (axis . sigma) / 2)`.
    pub fn rotation(axis: [f64; 3], angle: f64) -> Self {
        let h = 0.5 * angle;
        let (s, c) = h.sin_cos();
        Su2 {
            a: Complex64::new(c, -s * axis[2]),
            b: Complex64::new(s * axis[1], -s * axis[0]),
        }
    }

    pub fn to_matrix(&self) -> [[Complex64; 2]; 2] {
        [[self.a, -self.b.conj()], [self.b, self.a.conj()]]
    }
}

/// `tr(rho^2) = (x^2 + y^2 + z^2) / 2 + 1/2`.
pub fn purity(rho: &DensityMatrix) -> f64 {
    0.5 * rho.bloch().norm_sqr() + 0.5
}

/// Purity inferred from a single `<sigma_z>` measurement after the transfer
/// pulse, `z^2 / 2 + 1/2`.
pub fn approx_purity(z_expect: f64) -> Result<f64> {
    if !z_expect.is_finite() || z_expect.abs() > 1.0 + 1e-9 {
        return Err(Error::InvalidExpectation(z_expect));
    }
    Ok(0.5 * z_expect * z_expect + 0.5)
}

/// Exact `|purity - approx_purity|` for a Bloch vector of length `r`
/// misaligned by `theta_misalign` from the transfer axis.
pub fn approx_purity_error_bound(r: f64, theta_misalign: f64) -> f64 {
    let s = theta_misalign.sin();
    0.5 * r * r * s * s
}

/// Instantaneous rotation `rho -> U rho U^dagger`, `U = exp(-i angle (axis . sigma) / 2)`.
pub fn rotate_ideal(rho: &DensityMatrix, axis: [f64; 3], angle: f64) -> Result<DensityMatrix> {
    let n = (axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]).sqrt();
    if !n.is_finite() || (n - 1.0).abs() > 1e-9 {
        return Err(Error::AxisNotNormalized(n));
    }
    Ok(rho.conjugate(&Su2::rotation(axis, angle)))
}

/// Transforms a lab-frame state into the frame co-rotating with the qubit,
/// `rho -> exp(+i omega t sigma_z / 2) rho exp(-i omega t sigma_z / 2)`.
///
/// Under the lab Hamiltonian `+omega sigma_z / 2` free precession is
/// counter-clockwise about z, so this undoes it: a state freely evolved for
/// time `t` maps back to its initial value.
pub fn to_rotating_frame(rho: &DensityMatrix, omega: f64, t: f64) -> DensityMatrix {
    let (s, c) = (omega * t).sin_cos();
    DensityMatrix::new_unchecked(rho.rho00, rho.rho01 * Complex64::new(c, s))
}
