//! Transmission-line readout: maps the spin-conditional inductive energy to
//! a spin-conditional resonance frequency of the terminating resonator and
//! calibrates the line length against a target frequency.
//!
//! SI units are confined to this module; the public surface speaks GHz.

use crate::circuit::ChainCircuit;
use crate::solver::{solve_all_configs, SolverError, SolverOptions};
use crate::units::{PHI0, PLANCK_H, SPEED_OF_LIGHT};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ResonatorError {
    #[error("inductive energy must be positive, got {0} GHz")]
    NonPositiveInductiveEnergy(f64),
    #[error("no resonance root bracketed in (0, pi)")]
    NoRootInBracket,
    #[error("target {target_ghz} GHz unreachable; achievable range [{low_ghz}, {high_ghz}] GHz")]
    TargetUnreachable {
        target_ghz: f64,
        low_ghz: f64,
        high_ghz: f64,
    },
    #[error("line parameter out of range: {0}")]
    BadLine(String),
    #[error("config {config_index}: {source}")]
    Solve {
        config_index: usize,
        #[source]
        source: SolverError,
    },
}

/// Quarter-wave transmission line terminated by the spin chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransmissionLine {
    /// Characteristic impedance, ohm.
    pub z_c_ohm: f64,
    /// Phase velocity, m/s.
    pub v_eff_m_per_s: f64,
    /// Line length, m.
    pub length_m: f64,
    /// Multiplier in the termination impedance `Z_L = factor * i omega phi0^2 / E_L`.
    /// The reference convention is 2; 1 halves the effective load inductance.
    #[serde(default = "default_impedance_factor")]
    pub impedance_factor: f64,
}

fn default_impedance_factor() -> f64 {
    2.0
}

/// Calibration search window for the line length, m.
pub const LENGTH_BOUNDS_M: (f64, f64) = (1e-4, 3.3e-3);

impl TransmissionLine {
    pub fn new(z_c_ohm: f64, v_eff_m_per_s: f64, length_m: f64) -> Result<Self, ResonatorError> {
        if z_c_ohm <= 0.0 || v_eff_m_per_s <= 0.0 {
            return Err(ResonatorError::BadLine(format!(
                "Z_c = {z_c_ohm} ohm, v_eff = {v_eff_m_per_s} m/s"
            )));
        }
        if !(1e-5..=1e-1).contains(&length_m) {
            return Err(ResonatorError::BadLine(format!(
                "length {length_m} m outside [1e-5, 1e-1] m"
            )));
        }
        Ok(Self {
            z_c_ohm,
            v_eff_m_per_s,
            length_m,
            impedance_factor: 2.0,
        })
    }

    /// Reference line: 50 ohm, v_eff = 0.39 c.
    pub fn reference(length_m: f64) -> Result<Self, ResonatorError> {
        Self::new(50.0, 0.39 * SPEED_OF_LIGHT, length_m)
    }

    /// Unloaded quarter-wave frequency `v_eff / 4 l`, GHz.
    pub fn quarter_wave_ghz(&self) -> f64 {
        self.v_eff_m_per_s / (4.0 * self.length_m) * 1e-9
    }
}

/// Smallest positive resonance of the loaded line, GHz.
///
/// Solves `cot(x) = k x` on x in (0, pi) with
/// `k = factor * phi0^2 * v_eff / (E_L Z_c l)` (E_L in joules), by bisection
/// to machine width followed by a Newton polish. The residual at the root is
/// below 1e-9 in these natural units and the frequency is far tighter than
/// the 1 Hz contract.
pub fn resonance_frequency(e_l_ghz: f64, line: &TransmissionLine) -> Result<f64, ResonatorError> {
    if e_l_ghz <= 0.0 {
        return Err(ResonatorError::NonPositiveInductiveEnergy(e_l_ghz));
    }
    let e_l_joule = e_l_ghz * 1e9 * PLANCK_H;
    let k = line.impedance_factor * PHI0 * PHI0 * line.v_eff_m_per_s
        / (e_l_joule * line.z_c_ohm * line.length_m);
    let f = |x: f64| 1.0 / x.tan() - k * x;

    let eps = 1e-9;
    let (mut lo, mut hi) = (eps, std::f64::consts::PI - eps);
    if !(f(lo) > 0.0 && f(hi) < 0.0) {
        return Err(ResonatorError::NoRootInBracket);
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut x = 0.5 * (lo + hi);
    for _ in 0..2 {
        let s = x.sin();
        let derivative = -1.0 / (s * s) - k;
        x -= f(x) / derivative;
    }
    Ok(x * line.v_eff_m_per_s / (2.0 * std::f64::consts::PI * line.length_m) * 1e-9)
}

/// Resonance frequencies of all spin configurations.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReadoutTable {
    /// Per-config inductive energy, GHz, indexed by config index.
    pub inductive_energies_ghz: Vec<f64>,
    /// Per-config resonance frequency, GHz, indexed by config index.
    pub frequencies_ghz: Vec<f64>,
    /// Spin-unconditional reference frequency (mean over configs), GHz.
    pub f_r0_ghz: f64,
}

/// Solve every configuration and compute its loaded resonance frequency.
pub fn readout_table(
    circuit: &ChainCircuit,
    line: &TransmissionLine,
    opts: &SolverOptions,
) -> Result<ReadoutTable, ResonatorError> {
    let solutions = solve_all_configs(circuit, opts).map_err(|e| match e {
        SolverError::SweepFailure { config_index, source, .. } => ResonatorError::Solve {
            config_index,
            source: *source,
        },
        other => ResonatorError::Solve {
            config_index: usize::MAX,
            source: other,
        },
    })?;
    let mut e_l = Vec::with_capacity(solutions.len());
    let mut freqs = Vec::with_capacity(solutions.len());
    for sol in &solutions {
        let e = sol.inductive_energy_ghz.expect("free-mode solve");
        e_l.push(e);
        freqs.push(resonance_frequency(e, line)?);
    }
    let f_r0 = freqs.iter().sum::<f64>() / freqs.len() as f64;
    Ok(ReadoutTable {
        inductive_energies_ghz: e_l,
        frequencies_ghz: freqs,
        f_r0_ghz: f_r0,
    })
}

/// Line length that puts the spin-unconditional resonance at `target_f0_ghz`,
/// searched over [`LENGTH_BOUNDS_M`] by bisection (f_r0 is strictly
/// decreasing in the length). Converges to 1 Hz on the closure.
pub fn calibrate_length(
    circuit: &ChainCircuit,
    z_c_ohm: f64,
    v_eff_m_per_s: f64,
    impedance_factor: f64,
    target_f0_ghz: f64,
    opts: &SolverOptions,
) -> Result<f64, ResonatorError> {
    let solutions = solve_all_configs(circuit, opts).map_err(|e| ResonatorError::Solve {
        config_index: usize::MAX,
        source: e,
    })?;
    let e_l: Vec<f64> = solutions
        .iter()
        .map(|s| s.inductive_energy_ghz.expect("free-mode solve"))
        .collect();
    let line_at = |l: f64| TransmissionLine {
        z_c_ohm,
        v_eff_m_per_s,
        length_m: l,
        impedance_factor,
    };
    let f0_at = |l: f64| -> Result<f64, ResonatorError> {
        let line = line_at(l);
        let mut sum = 0.0;
        for &e in &e_l {
            sum += resonance_frequency(e, &line)?;
        }
        Ok(sum / e_l.len() as f64)
    };

    let (mut lo, mut hi) = LENGTH_BOUNDS_M;
    let f_hi = f0_at(lo)?; // short line -> high frequency
    let f_lo = f0_at(hi)?;
    if target_f0_ghz > f_hi || target_f0_ghz < f_lo {
        return Err(ResonatorError::TargetUnreachable {
            target_ghz: target_f0_ghz,
            low_ghz: f_lo,
            high_ghz: f_hi,
        });
    }
    let hz = 1e-9; // 1 Hz in GHz
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let f_mid = f0_at(mid)?;
        if (f_mid - target_f0_ghz).abs() < 0.25 * hz {
            return Ok(mid);
        }
        if f_mid > target_f0_ghz {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < f64::EPSILON * hi {
            break;
        }
    }
    let l = 0.5 * (lo + hi);
    let f = f0_at(l)?;
    if (f - target_f0_ghz).abs() < hz {
        Ok(l)
    } else {
        Err(ResonatorError::TargetUnreachable {
            target_ghz: target_f0_ghz,
            low_ghz: f.min(target_f0_ghz),
            high_ghz: f.max(target_f0_ghz),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::presets;

    fn reference_line(length_m: f64) -> TransmissionLine {
        TransmissionLine::reference(length_m).unwrap()
    }

    #[test]
    fn quarter_wave_limit() {
        // E_L -> infinity drives the right side to zero: cot(x) = 0 at pi/2.
        let line = reference_line(3.25e-3);
        let f = resonance_frequency(1e12, &line).unwrap();
        let qw = line.quarter_wave_ghz();
        assert!(((f - qw) / qw).abs() < 1e-9, "f = {f}, quarter wave = {qw}");
        assert!((qw - 9.0).abs() < 0.01, "3.25 mm quarter wave = {qw} GHz");
    }

    #[test]
    fn loading_lowers_the_resonance() {
        let line = reference_line(3.25e-3);
        let qw = line.quarter_wave_ghz();
        let mut prev = 0.0;
        // omega_r is monotone increasing in E_L and stays below quarter wave.
        for k in 0..50 {
            let e_l = 1.0 * 1.3f64.powi(k);
            let f = resonance_frequency(e_l, &line).unwrap();
            assert!(f < qw);
            assert!(f > prev, "not monotone at E_L = {e_l}");
            prev = f;
        }
    }

    #[test]
    fn root_residual_is_small() {
        let line = reference_line(1.0e-3);
        for &e_l in &[0.5, 5.0, 50.0, 500.0] {
            let f = resonance_frequency(e_l, &line).unwrap();
            let omega = 2.0 * std::f64::consts::PI * f * 1e9;
            let x = omega * line.length_m / line.v_eff_m_per_s;
            let k = line.impedance_factor * PHI0 * PHI0 * line.v_eff_m_per_s
                / (e_l * 1e9 * PLANCK_H * line.z_c_ohm * line.length_m);
            let residual = (1.0 / x.tan() - k * x).abs();
            assert!(residual < 1e-9, "residual {residual:.3e} at E_L = {e_l}");
        }
    }

    #[test]
    fn non_positive_inductive_energy_rejected() {
        let line = reference_line(1.0e-3);
        assert!(matches!(
            resonance_frequency(0.0, &line),
            Err(ResonatorError::NonPositiveInductiveEnergy(_))
        ));
        assert!(matches!(
            resonance_frequency(-1.0, &line),
            Err(ResonatorError::NonPositiveInductiveEnergy(_))
        ));
    }

    #[test]
    fn readout_table_identical_without_spin_energy() {
        let mut c = presets::three_spin(5.0, 5.0);
        for j in &mut c.junctions {
            j.e_sigma_ghz = 0.0;
        }
        let table = readout_table(&c, &reference_line(1.0e-3), &SolverOptions::default()).unwrap();
        for &f in &table.frequencies_ghz {
            assert!((f - table.f_r0_ghz).abs() < 1e-12);
        }
    }

    #[test]
    fn readout_table_pairs_by_kramers() {
        let c = presets::three_spin(5.0, 5.0);
        let table = readout_table(&c, &reference_line(1.0e-3), &SolverOptions::default()).unwrap();
        let hz = 1e-9;
        let mut distinct: Vec<f64> = Vec::new();
        for config in crate::circuit::SpinConfig::all(3) {
            let a = table.frequencies_ghz[config.index()];
            let b = table.frequencies_ghz[config.flip().index()];
            assert!((a - b).abs() < hz, "pair split {:.3e} GHz", (a - b).abs());
            if !distinct.iter().any(|&f| (f - a).abs() < hz) {
                distinct.push(a);
            }
        }
        assert!(distinct.len() <= 4, "{} distinct frequencies", distinct.len());
    }

    #[test]
    fn calibration_closure() {
        // At 1 nH uniform inductors the 9 GHz target is reachable; the
        // recomputed f_r0 at the returned length must close to 1 Hz.
        let c = presets::three_spin(1.0, 1.0);
        let opts = SolverOptions::default();
        let l = calibrate_length(&c, 50.0, 0.39 * SPEED_OF_LIGHT, 2.0, 9.0, &opts).unwrap();
        assert!((LENGTH_BOUNDS_M.0..=LENGTH_BOUNDS_M.1).contains(&l));
        let line = TransmissionLine {
            z_c_ohm: 50.0,
            v_eff_m_per_s: 0.39 * SPEED_OF_LIGHT,
            length_m: l,
            impedance_factor: 2.0,
        };
        let table = readout_table(&c, &line, &opts).unwrap();
        assert!(
            (table.f_r0_ghz - 9.0).abs() < 1e-9,
            "closure {:.3e} GHz",
            (table.f_r0_ghz - 9.0).abs()
        );
    }

    #[test]
    fn calibration_curve_is_decreasing() {
        let c = presets::three_spin(1.0, 1.0);
        let opts = SolverOptions::default();
        let sols = solve_all_configs(&c, &opts).unwrap();
        let e_l: Vec<f64> = sols.iter().map(|s| s.inductive_energy_ghz.unwrap()).collect();
        let mut prev = f64::INFINITY;
        for k in 0..12 {
            let l = 1e-4 + k as f64 * (3.3e-3 - 1e-4) / 11.0;
            let line = TransmissionLine {
                z_c_ohm: 50.0,
                v_eff_m_per_s: 0.39 * SPEED_OF_LIGHT,
                length_m: l,
                impedance_factor: 2.0,
            };
            let f0 = e_l
                .iter()
                .map(|&e| resonance_frequency(e, &line).unwrap())
                .sum::<f64>()
                / e_l.len() as f64;
            assert!(f0 < prev, "f_r0 not decreasing at l = {l}");
            prev = f0;
        }
    }

    #[test]
    fn unreachable_target_reports_interval() {
        let c = presets::three_spin(5.0, 5.0);
        let err = calibrate_length(
            &c,
            50.0,
            0.39 * SPEED_OF_LIGHT,
            2.0,
            500.0,
            &SolverOptions::default(),
        )
        .unwrap_err();
        match err {
            ResonatorError::TargetUnreachable { low_ghz, high_ghz, .. } => {
                assert!(low_ghz < high_ghz);
            }
            other => panic!("expected TargetUnreachable, got {other:?}"),
        }
    }
}
