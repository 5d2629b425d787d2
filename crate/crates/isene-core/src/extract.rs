//! Inversion of per-configuration energies, resonator frequencies and
//! junction phase drops into effective-model coefficients: Ising couplings,
//! dispersive shifts and EDSR weights, plus the 2D inductance scan.

use crate::circuit::{ChainCircuit, SpinConfig};
use crate::resonator::{
    calibrate_length, readout_table, ReadoutTable, ResonatorError, TransmissionLine,
    LENGTH_BOUNDS_M,
};
use crate::solver::{solve_all_configs, SolverError, SolverOptions};
use crate::walsh::{walsh_from_dense, WalshCoefficients};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ExtractError {
    #[error("extraction requires a Kramers point (all fluxes 0 or pi); pass require_kramers = false to override")]
    NotKramersPoint,
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Resonator(#[from] ResonatorError),
}

#[derive(Debug, Clone)]
pub struct ExtractOptions {
    pub solver: SolverOptions,
    /// Refuse extraction away from a time-reversal symmetric flux point.
    pub require_kramers: bool,
}

impl Default for ExtractOptions {
    fn default() -> Self {
        Self {
            solver: SolverOptions::default(),
            require_kramers: true,
        }
    }
}

/// Walsh expansion of the ground energies E_g(sigma), GHz.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IsingCoefficients {
    pub walsh: WalshCoefficients,
    /// Ground energies per config index, GHz (the extraction input).
    pub energies_ghz: Vec<f64>,
}

impl IsingCoefficients {
    /// Energy offset J_0, GHz. Retained for phase integrals, excluded from
    /// the coupling summary.
    pub fn j0_ghz(&self) -> f64 {
        self.walsh.constant()
    }

    /// Pairwise coupling J_{hj}, GHz (0-based spin labels).
    pub fn j_pair_ghz(&self, h: usize, j: usize) -> f64 {
        self.walsh.pair(h, j)
    }

    pub fn pairs_ghz(&self) -> Vec<((usize, usize), f64)> {
        self.walsh.pairs()
    }

    /// Largest odd-order coefficient magnitude, MHz. Vanishes at a Kramers
    /// point.
    pub fn max_abs_odd_mhz(&self) -> f64 {
        self.walsh.max_abs_odd() * 1e3
    }
}

/// Walsh expansion of the resonance frequencies f_r(sigma), GHz.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DispersiveCoefficients {
    pub walsh: WalshCoefficients,
    pub readout: ReadoutTable,
}

impl DispersiveCoefficients {
    /// Spin-unconditional resonance frequency (Walsh constant term), GHz.
    pub fn f_r0_ghz(&self) -> f64 {
        self.walsh.constant()
    }

    /// Pairwise dispersive shift chi_{hj}/2pi, GHz.
    pub fn chi_pair_ghz(&self, h: usize, j: usize) -> f64 {
        self.walsh.pair(h, j)
    }

    pub fn pairs_ghz(&self) -> Vec<((usize, usize), f64)> {
        self.walsh.pairs()
    }

    pub fn max_abs_odd_mhz(&self) -> f64 {
        self.walsh.max_abs_odd() * 1e3
    }
}

/// EDSR weights A_{jk}: row j holds the expansion of the equilibrium phase
/// drop across junction j in the spins, `<phi_j>(sigma) ~ sum_k A_jk sigma_k`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EdsrWeights {
    /// `matrix[j][k]`, dimensionless; j = driven junction, k = spin.
    pub matrix: Vec<Vec<f64>>,
    /// Equilibrium drops per config, `drops[config index][junction]`, rad.
    pub drops_rad: Vec<Vec<f64>>,
    /// Largest absolute error of the order-1 reconstruction, rad.
    pub truncation_residual_rad: f64,
}

impl EdsrWeights {
    pub fn num_spins(&self) -> usize {
        self.matrix.len()
    }

    /// Largest |A_jk| with k != j.
    pub fn max_abs_offdiagonal(&self) -> f64 {
        let mut m: f64 = 0.0;
        for (j, row) in self.matrix.iter().enumerate() {
            for (k, &a) in row.iter().enumerate() {
                if k != j {
                    m = m.max(a.abs());
                }
            }
        }
        m
    }

    /// Weight row for driving junction j, with the self term zeroed.
    pub fn drive_row(&self, j: usize, include_self_term: bool) -> Vec<f64> {
        let mut row = self.matrix[j].clone();
        if !include_self_term {
            row[j] = 0.0;
        }
        row
    }
}

fn check_kramers(circuit: &ChainCircuit, opts: &ExtractOptions) -> Result<(), ExtractError> {
    if opts.require_kramers && !circuit.is_kramers_point() {
        return Err(ExtractError::NotKramersPoint);
    }
    Ok(())
}

/// Extract the Ising couplings from the per-config ground energies.
pub fn extract_ising(
    circuit: &ChainCircuit,
    opts: &ExtractOptions,
) -> Result<IsingCoefficients, ExtractError> {
    check_kramers(circuit, opts)?;
    let solutions = solve_all_configs(circuit, &opts.solver)?;
    let energies: Vec<f64> = solutions.iter().map(|s| s.energy_ghz).collect();
    Ok(IsingCoefficients {
        walsh: walsh_from_dense(circuit.num_spins(), &energies),
        energies_ghz: energies,
    })
}

/// Extract the dispersive shifts from the per-config resonance frequencies.
pub fn extract_dispersive(
    circuit: &ChainCircuit,
    line: &TransmissionLine,
    opts: &ExtractOptions,
) -> Result<DispersiveCoefficients, ExtractError> {
    check_kramers(circuit, opts)?;
    let readout = readout_table(circuit, line, &opts.solver)?;
    Ok(DispersiveCoefficients {
        walsh: walsh_from_dense(circuit.num_spins(), &readout.frequencies_ghz),
        readout,
    })
}

/// Extract the EDSR weight matrix from the equilibrium junction drops.
pub fn extract_edsr_weights(
    circuit: &ChainCircuit,
    opts: &ExtractOptions,
) -> Result<EdsrWeights, ExtractError> {
    check_kramers(circuit, opts)?;
    let n = circuit.num_spins();
    let solutions = solve_all_configs(circuit, &opts.solver)?;
    let drops: Vec<Vec<f64>> = solutions.iter().map(|s| s.junction_drops.clone()).collect();

    let mut matrix = vec![vec![0.0; n]; n];
    for j in 0..n {
        let per_config: Vec<f64> = drops.iter().map(|d| d[j]).collect();
        let w = walsh_from_dense(n, &per_config);
        for (k, row_entry) in matrix[j].iter_mut().enumerate() {
            *row_entry = w.single(k);
        }
    }

    let mut residual: f64 = 0.0;
    for config in SpinConfig::all(n) {
        for j in 0..n {
            let reconstructed: f64 =
                (0..n).map(|k| matrix[j][k] * config.spin(k)).sum();
            residual = residual.max((drops[config.index()][j] - reconstructed).abs());
        }
    }
    Ok(EdsrWeights {
        matrix,
        drops_rad: drops,
        truncation_residual_rad: residual,
    })
}

/// Readout calibration request for scans: fix the spin-unconditional
/// frequency by varying the line length per grid point.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReadoutSpec {
    pub z_c_ohm: f64,
    pub v_eff_m_per_s: f64,
    pub impedance_factor: f64,
    pub target_f0_ghz: f64,
}

impl ReadoutSpec {
    pub fn line(&self, length_m: f64) -> TransmissionLine {
        TransmissionLine {
            z_c_ohm: self.z_c_ohm,
            v_eff_m_per_s: self.v_eff_m_per_s,
            length_m,
            impedance_factor: self.impedance_factor,
        }
    }
}

/// One grid point of the 2D inductance scan.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScanPoint {
    pub l_vertical_nh: f64,
    pub l_coupling_nh: f64,
    /// Pairwise J couplings, MHz, keyed (h, j) with h < j.
    pub j_pairs_mhz: Vec<((usize, usize), f64)>,
    /// Pairwise dispersive shifts, MHz. Present when a readout was requested
    /// and the point is computable.
    pub chi_pairs_mhz: Option<Vec<((usize, usize), f64)>>,
    pub f_r0_ghz: Option<f64>,
    pub length_m: Option<f64>,
    /// True when the target f_r0 was unreachable and the length was clamped
    /// to the nearest bound of the calibration window.
    pub length_clamped: bool,
    pub a_offdiagonal_max: f64,
    pub error: Option<String>,
}

/// Scan uniform vertical and coupling inductances over a rectangular grid.
/// Per-point failures are recorded in the row and the scan continues.
pub fn scan_2d(
    template: &ChainCircuit,
    l_vertical_nh: &[f64],
    l_coupling_nh: &[f64],
    readout: Option<&ReadoutSpec>,
    opts: &ExtractOptions,
) -> Vec<ScanPoint> {
    let mut points = Vec::with_capacity(l_vertical_nh.len() * l_coupling_nh.len());
    for &lv in l_vertical_nh {
        for &lc in l_coupling_nh {
            points.push(scan_point(template, lv, lc, readout, opts));
        }
    }
    points
}

/// Evaluate one grid point (used by scans and parallel front ends).
pub fn scan_point(
    template: &ChainCircuit,
    lv: f64,
    lc: f64,
    readout: Option<&ReadoutSpec>,
    opts: &ExtractOptions,
) -> ScanPoint {
    let n = template.num_spins();
    let mut circuit = template.clone();
    circuit.vertical_inductances_nh = vec![lv; n];
    circuit.coupling_inductances_nh = vec![lc; n - 1];

    let mut point = ScanPoint {
        l_vertical_nh: lv,
        l_coupling_nh: lc,
        j_pairs_mhz: Vec::new(),
        chi_pairs_mhz: None,
        f_r0_ghz: None,
        length_m: None,
        length_clamped: false,
        a_offdiagonal_max: f64::NAN,
        error: None,
    };

    let ising = match extract_ising(&circuit, opts) {
        Ok(i) => i,
        Err(e) => {
            point.error = Some(e.to_string());
            return point;
        }
    };
    point.j_pairs_mhz = ising
        .pairs_ghz()
        .into_iter()
        .map(|(k, v)| (k, v * 1e3))
        .collect();

    match extract_edsr_weights(&circuit, opts) {
        Ok(a) => point.a_offdiagonal_max = a.max_abs_offdiagonal(),
        Err(e) => point.error = Some(e.to_string()),
    }

    if let Some(spec) = readout {
        match calibrated_line(&circuit, spec, opts) {
            Ok((line, clamped)) => {
                point.length_m = Some(line.length_m);
                point.length_clamped = clamped;
                match extract_dispersive(&circuit, &line, opts) {
                    Ok(d) => {
                        point.f_r0_ghz = Some(d.f_r0_ghz());
                        point.chi_pairs_mhz = Some(
                            d.pairs_ghz().into_iter().map(|(k, v)| (k, v * 1e3)).collect(),
                        );
                    }
                    Err(e) => point.error = Some(e.to_string()),
                }
            }
            Err(e) => point.error = Some(e.to_string()),
        }
    }
    point
}

/// Calibrate the line length for this circuit, clamping to the nearest bound
/// of the search window when the target is unreachable.
pub fn calibrated_line(
    circuit: &ChainCircuit,
    spec: &ReadoutSpec,
    opts: &ExtractOptions,
) -> Result<(TransmissionLine, bool), ExtractError> {
    match calibrate_length(
        circuit,
        spec.z_c_ohm,
        spec.v_eff_m_per_s,
        spec.impedance_factor,
        spec.target_f0_ghz,
        &opts.solver,
    ) {
        Ok(l) => Ok((spec.line(l), false)),
        Err(ResonatorError::TargetUnreachable { low_ghz, high_ghz, .. }) => {
            // f_r0 decreases with length: the short bound realizes high_ghz.
            let l = if (spec.target_f0_ghz - high_ghz).abs() < (spec.target_f0_ghz - low_ghz).abs()
            {
                LENGTH_BOUNDS_M.0
            } else {
                LENGTH_BOUNDS_M.1
            };
            Ok((spec.line(l), true))
        }
        Err(e) => Err(e.into()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::presets;
    use crate::units::SPEED_OF_LIGHT;

    fn opts() -> ExtractOptions {
        ExtractOptions::default()
    }

    #[test]
    fn paper_couplings_are_mhz_scale_and_ordered() {
        let c = presets::three_spin(5.0, 5.0);
        let ising = extract_ising(&c, &opts()).unwrap();
        let j12 = ising.j_pair_ghz(0, 1).abs() * 1e3;
        let j23 = ising.j_pair_ghz(1, 2).abs() * 1e3;
        let j13 = ising.j_pair_ghz(0, 2).abs() * 1e3;
        assert!(j12 > 0.1 && j12 < 100.0, "J12 = {j12} MHz");
        assert!(j23 > 0.1 && j23 < 100.0, "J23 = {j23} MHz");
        // Next-nearest coupling is much smaller than nearest-neighbour.
        assert!(j13 / j12 < 0.5, "J13/J12 = {}", j13 / j12);
    }

    #[test]
    fn kramers_nulls_hold_and_are_nontrivial() {
        let c = presets::three_spin(5.0, 5.0);
        let ising = extract_ising(&c, &opts()).unwrap();
        assert!(ising.max_abs_odd_mhz() < 1e-6, "odd J = {}", ising.max_abs_odd_mhz());

        // An all-pi flux configuration is also time-reversal symmetric.
        let mut c_pi = c.clone();
        c_pi.external_fluxes_rad = vec![std::f64::consts::PI; 3];
        let ising_pi = extract_ising(&c_pi, &opts()).unwrap();
        assert!(ising_pi.max_abs_odd_mhz() < 1e-6);

        // Detuning one flux must break the null.
        let c_off = c.with_flux(0, 0.1);
        let o = ExtractOptions { require_kramers: false, ..opts() };
        let ising_off = extract_ising(&c_off, &o).unwrap();
        assert!(
            ising_off.max_abs_odd_mhz() > 1e-6,
            "odd J off Kramers = {}",
            ising_off.max_abs_odd_mhz()
        );
    }

    #[test]
    fn off_kramers_extraction_requires_override() {
        let c = presets::three_spin(5.0, 5.0).with_flux(1, 0.3);
        assert!(matches!(
            extract_ising(&c, &opts()),
            Err(ExtractError::NotKramersPoint)
        ));
    }

    #[test]
    fn middle_spin_energy_zero_decouples_neighbours() {
        let mut c = presets::three_spin(5.0, 5.0);
        c.junctions[1].e_sigma_ghz = 0.0;
        let ising = extract_ising(&c, &opts()).unwrap();
        assert!(ising.j_pair_ghz(0, 1).abs() < 1e-12);
        assert!(ising.j_pair_ghz(1, 2).abs() < 1e-12);
        // The outer pair still talks through the chain.
        assert!(ising.j_pair_ghz(0, 2).abs() > 1e-9);
    }

    #[test]
    fn dispersive_extraction_zero_without_spin_energy() {
        let mut c = presets::three_spin(5.0, 5.0);
        for j in &mut c.junctions {
            j.e_sigma_ghz = 0.0;
        }
        let line = TransmissionLine::reference(1e-3).unwrap();
        let d = extract_dispersive(&c, &line, &opts()).unwrap();
        for ((_, _), chi) in d.pairs_ghz() {
            assert!(chi.abs() < 1e-12);
        }
        assert!(d.max_abs_odd_mhz() < 1e-9);
    }

    #[test]
    fn edsr_weights_vanish_without_spin_energy() {
        let mut c = presets::three_spin(5.0, 5.0);
        for j in &mut c.junctions {
            j.e_sigma_ghz = 0.0;
        }
        let a = extract_edsr_weights(&c, &opts()).unwrap();
        for row in &a.matrix {
            for &v in row {
                assert!(v.abs() < 1e-12);
            }
        }
    }

    #[test]
    fn edsr_weights_paper_scale_and_antisymmetric_input() {
        let c = presets::three_spin(5.0, 5.0);
        let a = extract_edsr_weights(&c, &opts()).unwrap();
        assert!(
            a.max_abs_offdiagonal() >= 0.01,
            "max offdiag A = {}",
            a.max_abs_offdiagonal()
        );
        // Drops are odd under global spin flip at a Kramers point.
        for config in SpinConfig::all(3) {
            for j in 0..3 {
                let d1 = a.drops_rad[config.index()][j];
                let d2 = a.drops_rad[config.flip().index()][j];
                assert!((d1 + d2).abs() < 1e-9, "drop not odd: {d1} vs {d2}");
            }
        }
        // First-order truncation is an accurate description in this regime.
        assert!(a.truncation_residual_rad < 1e-3, "residual {}", a.truncation_residual_rad);
    }

    #[test]
    fn scan_is_deterministic_and_records_failures() {
        let c = presets::three_spin(5.0, 5.0);
        let spec = ReadoutSpec {
            z_c_ohm: 50.0,
            v_eff_m_per_s: 0.39 * SPEED_OF_LIGHT,
            impedance_factor: 2.0,
            target_f0_ghz: 9.0,
        };
        let p1 = scan_point(&c, 2.0, 2.0, Some(&spec), &opts());
        let p2 = scan_point(&c, 2.0, 2.0, Some(&spec), &opts());
        assert_eq!(p1.j_pairs_mhz, p2.j_pairs_mhz);
        assert_eq!(p1.chi_pairs_mhz, p2.chi_pairs_mhz);
        assert_eq!(p1.length_m, p2.length_m);
    }

    #[test]
    fn coupling_scales_with_the_tie_inductors() {
        // The nearest-neighbour J grows roughly linearly with the inductors
        // tying the two rails together and barely moves with the rail
        // inductors, while chi responds to both groups.
        let o = opts();
        let j12 = |lv: f64, lc: f64| {
            extract_ising(&presets::three_spin(lv, lc), &o)
                .unwrap()
                .j_pair_ghz(0, 1)
                .abs()
        };
        let tie_gain = j12(1.0, 10.0) / j12(1.0, 1.0);
        let rail_gain = j12(10.0, 1.0) / j12(1.0, 1.0);
        assert!(tie_gain > 5.0, "tie-inductor gain {tie_gain}");
        assert!((0.5..2.0).contains(&rail_gain), "rail-inductor gain {rail_gain}");

        let line = TransmissionLine::reference(1.5e-4).unwrap();
        let chi12 = |lv: f64, lc: f64| {
            extract_dispersive(&presets::three_spin(lv, lc), &line, &o)
                .unwrap()
                .chi_pair_ghz(0, 1)
                .abs()
        };
        let base = chi12(1.0, 1.0);
        assert!(chi12(1.0, 6.0) / base > 2.0, "chi must respond to the tie inductors");
        assert!(chi12(6.0, 1.0) / base > 2.0, "chi must respond to the rail inductors");
    }

    #[test]
    fn drive_row_excludes_self_term_by_default() {
        let c = presets::three_spin(5.0, 5.0);
        let a = extract_edsr_weights(&c, &opts()).unwrap();
        let row = a.drive_row(1, false);
        assert_eq!(row[1], 0.0);
        let row_self = a.drive_row(1, true);
        assert_eq!(row_self[1], a.matrix[1][1]);
    }
}
