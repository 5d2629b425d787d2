//! Physical constants and unit conventions.
//!
//! All energies are stored as `E/h` in GHz, all phases and fluxes in radians
//! (flux divided by the reduced flux quantum), inductances in nanohenry and
//! time in nanoseconds. SI units appear only inside the resonator module.

use std::f64::consts::PI;

/// Reduced Planck constant, J s.
pub const HBAR: f64 = 1.0545718e-34;

/// Elementary charge, C.
pub const ELEMENTARY_CHARGE: f64 = 1.602177e-19;

/// Planck constant, J s.
pub const PLANCK_H: f64 = 2.0 * PI * HBAR;

/// Reduced flux quantum `hbar / 2e`, Wb.
pub const PHI0: f64 = HBAR / (2.0 * ELEMENTARY_CHARGE);

/// Vacuum speed of light, m/s.
pub const SPEED_OF_LIGHT: f64 = 2.99792458e8;

/// Inductive energy scale `phi0^2 / (L h)` in GHz for an inductance in nH.
pub fn inductive_energy_ghz(inductance_nh: f64) -> f64 {
    PHI0 * PHI0 / (inductance_nh * 1e-9 * PLANCK_H) * 1e-9
}

/// Inverse of [`inductive_energy_ghz`]: inductance in nH for an energy in GHz.
pub fn inductance_nh(energy_ghz: f64) -> f64 {
    PHI0 * PHI0 / (energy_ghz * 1e9 * PLANCK_H) * 1e9
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inductive_energy_roundtrip() {
        let e = inductive_energy_ghz(5.0);
        assert!((inductance_nh(e) - 5.0).abs() < 1e-12);
    }

    #[test]
    fn nanohenry_scale() {
        // phi0^2 / h = 163.5 GHz nH, so 1 nH sits in the hundred-GHz decade.
        let e = inductive_energy_ghz(1.0);
        assert!(e > 100.0 && e < 200.0, "E_L(1 nH) = {e}");
    }
}
