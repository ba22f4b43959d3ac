//! Physical constants used across the simulator.
//!
//! All values are SI. The qubit is the Zeeman-split ground-state spin of a
//! single ⁴⁰Ca⁺ ion, so the Landé factor is fixed at 2 and the ion mass is
//! the ⁴⁰Ca atomic mass (the missing electron mass is far below the accuracy
//! that matters anywhere in this crate).

/// Landé g-factor of the S_1/2 ground state (exact for this model).
pub const G_J: f64 = 2.0;

/// Bohr magneton, J/T (CODATA 2022).
pub const MU_B: f64 = 9.274_010_065_7e-24;

/// Reduced Planck constant, J·s.
pub const HBAR: f64 = 1.054_571_817e-34;

/// Planck constant, J·s (exact by SI definition).
pub const PLANCK_H: f64 = 6.626_070_15e-34;

/// Elementary charge, C (exact by SI definition).
pub const ELEMENTARY_CHARGE: f64 = 1.602_176_634e-19;

/// Unified atomic mass unit, kg (CODATA 2022).
pub const ATOMIC_MASS_UNIT: f64 = 1.660_539_068_92e-27;

/// Mass of a ⁴⁰Ca atom, kg (AME2020 mass 39.962590850 u).
pub const CA40_MASS: f64 = 39.962_590_850 * ATOMIC_MASS_UNIT;

/// Spin phase accumulation rate per unit magnetic field, rad·s⁻¹·T⁻¹.
///
/// g_J·μ_B/ħ ≈ 1.7588·10¹¹: the conversion factor between a field-time
/// integral and the phase it imprints on the spin.
pub const ZEEMAN_PHASE_RATE: f64 = G_J * MU_B / HBAR;
