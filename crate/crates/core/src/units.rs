//! Unit conversions.
//!
//! Time is kept in ns and angular frequency in rad/ns throughout the library.
//! User-facing frequencies are ordinary frequencies in MHz.

use std::f64::consts::PI;

/// Ordinary frequency in MHz to angular frequency in rad/ns.
#[inline]
pub fn mhz_to_rad_per_ns(f_mhz: f64) -> f64 {
    2.0 * PI * f_mhz * 1e-3
}

/// Angular frequency in rad/ns to ordinary frequency in MHz.
#[inline]
pub fn rad_per_ns_to_mhz(omega: f64) -> f64 {
    omega / (2.0 * PI) * 1e3
}

/// Event rate in MHz (events per microsecond) to events per ns.
#[inline]
pub fn mhz_to_per_ns(rate_mhz: f64) -> f64 {
    rate_mhz * 1e-3
}

/// Larmor period in ns for a qubit frequency in MHz.
#[inline]
pub fn larmor_period_ns(f01_mhz: f64) -> f64 {
    1e3 / f01_mhz
}
