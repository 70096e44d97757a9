//! Physical constants (CODATA 2018, SI) and unit conversions used at the
//! configuration boundary.

/// Elementary charge (C).
pub const Q_E: f64 = 1.602_176_634e-19;
/// Boltzmann constant (J/K).
pub const K_B: f64 = 1.380_649e-23;
/// Reduced Planck constant (J s).
pub const HBAR: f64 = 1.054_571_817e-34;
/// Planck constant (J s).
pub const H_PLANCK: f64 = 6.626_070_15e-34;
/// Electron rest mass (kg).
pub const M_E: f64 = 9.109_383_701_5e-31;
/// Vacuum permittivity (F/m).
pub const EPS0_CODATA: f64 = 8.854_187_812_8e-12;
/// Vacuum permittivity as printed in the original device study (F/m).
/// Kept only for reproducing its numbers.
pub const EPS0_PRINTED: f64 = 8.99e-12;
/// Vacuum permeability (H/m).
pub const MU0: f64 = 1.256_637_062_12e-6;
/// Bohr magneton (J/T).
pub const MU_B: f64 = 9.274_010_078_3e-24;

/// Largest decimal exponent representable in an IEEE double; bounds the
/// arguments of every exponential in the charge density.
pub const EXP_DECADE_BOUND: f64 = 308.0;

pub const CM_PER_M: f64 = 100.0;
pub const M_PER_UM: f64 = 1e-6;
pub const M_PER_NM: f64 = 1e-9;
/// Multiply a density in cm^-3 by this to get m^-3.
pub const PER_CM3_TO_PER_M3: f64 = 1e6;
/// Multiply a field in V/cm by this to get V/m.
pub const V_PER_CM_TO_V_PER_M: f64 = 100.0;

/// Thermal energy k_B T in joules.
#[inline]
pub fn thermal_energy(t: f64) -> f64 {
    K_B * t
}

/// Thermal voltage k_B T / e in volts.
#[inline]
pub fn thermal_voltage(t: f64) -> f64 {
    K_B * t / Q_E
}
