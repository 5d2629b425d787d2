//! Logical phase gates and the bit-flip detect-and-correct cycle: flux-pulse
//! R_Z phase accumulation, intermodule R_ZZ at the effective-Ising level,
//! dispersive syndrome classification and the conditional EDSR correction
//! pulse with Pauli-frame bookkeeping.

use crate::circuit::{ChainCircuit, SpinConfig};
use crate::dynamics::{propagate, LogicalFrame, SpinHamiltonian, StateVector};
use crate::pulse::{PulseError, PulseSchedule};
use crate::resonator::ReadoutTable;
use crate::solver::{
    solve_equilibrium, solve_equilibrium_from, SolveMode, SolverError, SolverOptions,
};
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;
use thiserror::Error;

/// Propagation step for correction pulses, as a fraction of the
/// `1/(20 f_max)` bound. The tight value keeps the midpoint-rule
/// discretization error below the 1e-6 logical-weight budget.
const QEC_DT_FRACTION: f64 = 0.2;

#[derive(Debug, Error)]
pub enum QecError {
    #[error("flux trajectory must start and end at zero (got {0} rad)")]
    EndpointNotZero(f64),
    #[error("bad trajectory: {0}")]
    BadTrajectory(String),
    #[error("ambiguous readout frequency: {0}")]
    AmbiguousFrequency(String),
    #[error("state is not a correctable single-flip state: {0}")]
    UncorrectableState(String),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Pulse(#[from] PulseError),
    #[error(transparent)]
    Dynamics(#[from] crate::dynamics::DynamicsError),
}

/// Sampled flux pulse on one loop, uniform time grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FluxTrajectory {
    pub loop_index: usize,
    pub t_total_ns: f64,
    pub flux_rad: Vec<f64>,
    /// True for idealized rectangular pulses whose instantaneous rise and
    /// fall carry zero measure; the stored samples are then the plateau.
    pub instantaneous_edges: bool,
}

impl FluxTrajectory {
    /// Sample `f` on a uniform grid; the pulse must vanish at both ends.
    /// Endpoint values below 1e-12 rad (rounding dust from shapes like
    /// sin^2) are snapped to exact zeros; anything larger is an error.
    pub fn sampled(
        loop_index: usize,
        t_total_ns: f64,
        samples: usize,
        f: impl Fn(f64) -> f64,
    ) -> Result<Self, QecError> {
        if samples < 3 || samples.is_multiple_of(2) {
            return Err(QecError::BadTrajectory(format!(
                "need an odd number of samples >= 3, got {samples}"
            )));
        }
        let mut flux: Vec<f64> = (0..samples)
            .map(|i| f(t_total_ns * i as f64 / (samples - 1) as f64))
            .collect();
        for idx in [0, samples - 1] {
            if flux[idx].abs() > 1e-12 {
                return Err(QecError::EndpointNotZero(flux[idx]));
            }
            flux[idx] = 0.0;
        }
        Ok(Self {
            loop_index,
            t_total_ns,
            flux_rad: flux,
            instantaneous_edges: false,
        })
    }

    /// Idealized rectangular pulse: constant plateau with instantaneous
    /// zero-measure edges.
    pub fn rect(loop_index: usize, flux_rad: f64, t_total_ns: f64, samples: usize) -> Self {
        let samples = if samples.is_multiple_of(2) { samples + 1 } else { samples.max(3) };
        Self {
            loop_index,
            t_total_ns,
            flux_rad: vec![flux_rad; samples],
            instantaneous_edges: true,
        }
    }

    pub fn negated(&self) -> Self {
        Self {
            loop_index: self.loop_index,
            t_total_ns: self.t_total_ns,
            flux_rad: self.flux_rad.iter().map(|f| -f).collect(),
            instantaneous_edges: self.instantaneous_edges,
        }
    }
}

/// Composite Simpson rule on a uniform grid with an odd number of samples.
fn simpson(values: &[f64], dt: f64) -> f64 {
    let n = values.len();
    debug_assert!(n >= 3 && n % 2 == 1);
    let mut acc = values[0] + values[n - 1];
    for (i, &v) in values.iter().enumerate().take(n - 1).skip(1) {
        acc += if i % 2 == 1 { 4.0 * v } else { 2.0 * v };
    }
    acc * dt / 3.0
}

/// Accumulated logical phase of a flux pulse.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct RzPhase {
    /// Unwrapped phase, rad.
    pub theta_rad: f64,
    /// Phase reduced to (-pi, pi].
    pub theta_mod_rad: f64,
}

pub fn wrap_angle(theta: f64) -> f64 {
    let mut t = theta.rem_euclid(TAU);
    if t > std::f64::consts::PI {
        t -= TAU;
    }
    t
}

/// Logical R_Z phase `theta = 2 pi int [nu_up(Phi(t)) - nu_down(Phi(t))] dt`
/// with the all-up / all-down splitting from equilibrium re-solves along the
/// trajectory, integrated by composite Simpson.
pub fn rz_phase(
    circuit: &ChainCircuit,
    trajectory: &FluxTrajectory,
    opts: &SolverOptions,
) -> Result<RzPhase, QecError> {
    if !trajectory.instantaneous_edges {
        let first = trajectory.flux_rad[0];
        let last = *trajectory.flux_rad.last().unwrap();
        if first != 0.0 {
            return Err(QecError::EndpointNotZero(first));
        }
        if last != 0.0 {
            return Err(QecError::EndpointNotZero(last));
        }
    }
    let n = trajectory.flux_rad.len();
    if n < 3 || n.is_multiple_of(2) {
        return Err(QecError::BadTrajectory(format!(
            "need an odd number of samples >= 3, got {n}"
        )));
    }
    let up = SpinConfig::from_index(circuit.num_spins(), 0);
    let down = up.flip();
    let mut warm_up = None;
    let mut warm_down = None;
    let mut splitting = Vec::with_capacity(n);
    for &flux in &trajectory.flux_rad {
        let c = circuit.with_flux(trajectory.loop_index, flux);
        let sol_up = match &warm_up {
            None => solve_equilibrium(&c, up, SolveMode::FreeInputPhase, opts)?,
            Some(x0) => solve_equilibrium_from(&c, up, SolveMode::FreeInputPhase, x0, opts)?,
        };
        let sol_down = match &warm_down {
            None => solve_equilibrium(&c, down, SolveMode::FreeInputPhase, opts)?,
            Some(x0) => solve_equilibrium_from(&c, down, SolveMode::FreeInputPhase, x0, opts)?,
        };
        warm_up = Some(sol_up.phases.to_vector());
        warm_down = Some(sol_down.phases.to_vector());
        splitting.push(sol_up.energy_ghz - sol_down.energy_ghz);
    }
    let dt = trajectory.t_total_ns / (n - 1) as f64;
    let theta = TAU * simpson(&splitting, dt);
    Ok(RzPhase {
        theta_rad: theta,
        theta_mod_rad: wrap_angle(theta),
    })
}

/// Closed form for a constant detuning: `theta = 2 pi dnu(Phi0) tau`.
pub fn rz_phase_constant(
    circuit: &ChainCircuit,
    loop_index: usize,
    flux_rad: f64,
    duration_ns: f64,
    opts: &SolverOptions,
) -> Result<f64, QecError> {
    let c = circuit.with_flux(loop_index, flux_rad);
    let up = SpinConfig::from_index(circuit.num_spins(), 0);
    let e_up = solve_equilibrium(&c, up, SolveMode::FreeInputPhase, opts)?.energy_ghz;
    let e_down = solve_equilibrium(&c, up.flip(), SolveMode::FreeInputPhase, opts)?.energy_ghz;
    Ok(TAU * (e_up - e_down) * duration_ns)
}

/// Intermodule R_ZZ phase from a sampled coupling pulse.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct RzzPhase {
    pub theta_rad: f64,
    /// Set when |j_inter| is not weak compared to the intramodule couplings.
    pub weak_coupling_warning: bool,
}

/// Logical R_ZZ angle `theta = 2 pi int 2 j_inter dt` (area formula at the
/// effective-Ising level). `j_inter` is sampled on a uniform grid with an
/// odd number of points; `intra_min_ghz` triggers the weak-coupling warning.
pub fn rzz_phase(
    j_inter_ghz: &[f64],
    t_total_ns: f64,
    intra_min_ghz: Option<f64>,
) -> Result<RzzPhase, QecError> {
    let n = j_inter_ghz.len();
    if n < 3 || n.is_multiple_of(2) {
        return Err(QecError::BadTrajectory(format!(
            "need an odd number of samples >= 3, got {n}"
        )));
    }
    let dt = t_total_ns / (n - 1) as f64;
    let theta = TAU * 2.0 * simpson(j_inter_ghz, dt);
    let peak = j_inter_ghz.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
    let warning = intra_min_ghz.map(|j| peak >= j).unwrap_or(false);
    Ok(RzzPhase {
        theta_rad: theta,
        weak_coupling_warning: warning,
    })
}

/// Stabilizer signs `(sigma_1 sigma_2, sigma_2 sigma_3)` of a configuration.
pub fn syndrome_of(config: SpinConfig) -> (i8, i8) {
    let s = config.spins();
    (s[0] * s[1], s[1] * s[2])
}

/// Correction map: which spin a syndrome points at.
pub fn correction_spin(syndrome: (i8, i8)) -> Option<usize> {
    match syndrome {
        (1, 1) => None,
        (-1, 1) => Some(0),
        (-1, -1) => Some(1),
        (1, -1) => Some(2),
        _ => unreachable!("syndrome signs are +-1"),
    }
}

/// Dispersive syndrome classes: one resonator frequency per stabilizer
/// outcome, separated by more than the linewidth proxy kappa.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SyndromeModel {
    /// `(syndrome, class frequency GHz)`, in a fixed order.
    pub classes: Vec<((i8, i8), f64)>,
    pub kappa_ghz: f64,
}

impl SyndromeModel {
    /// Build the four classes from a readout table; fails when two class
    /// frequencies are closer than kappa or a Kramers pair is split.
    pub fn from_readout(table: &ReadoutTable, kappa_ghz: f64) -> Result<Self, QecError> {
        let mut classes: Vec<((i8, i8), Vec<f64>)> = vec![
            ((1, 1), vec![]),
            ((-1, 1), vec![]),
            ((-1, -1), vec![]),
            ((1, -1), vec![]),
        ];
        for config in SpinConfig::all(3) {
            let s = syndrome_of(config);
            let f = table.frequencies_ghz[config.index()];
            classes
                .iter_mut()
                .find(|(k, _)| *k == s)
                .expect("all four classes present")
                .1
                .push(f);
        }
        let mut out = Vec::new();
        for (s, freqs) in classes {
            if freqs.len() != 2 {
                return Err(QecError::AmbiguousFrequency(format!(
                    "class {s:?} holds {} configs, expected a Kramers pair",
                    freqs.len()
                )));
            }
            let split = (freqs[0] - freqs[1]).abs();
            if split > kappa_ghz * 0.1 {
                return Err(QecError::AmbiguousFrequency(format!(
                    "Kramers pair of class {s:?} split by {split:.3e} GHz"
                )));
            }
            out.push((s, 0.5 * (freqs[0] + freqs[1])));
        }
        for i in 0..out.len() {
            for j in i + 1..out.len() {
                let d = (out[i].1 - out[j].1).abs();
                if d <= kappa_ghz {
                    return Err(QecError::AmbiguousFrequency(format!(
                        "classes {:?} and {:?} separated by only {d:.3e} GHz (kappa = {kappa_ghz:.3e})",
                        out[i].0, out[j].0
                    )));
                }
            }
        }
        Ok(Self {
            classes: out,
            kappa_ghz,
        })
    }

    /// Nearest class within kappa/2 of the measured frequency.
    pub fn classify(&self, measured_ghz: f64) -> Result<(i8, i8), QecError> {
        let mut best: Option<((i8, i8), f64)> = None;
        for &(s, f) in &self.classes {
            let d = (measured_ghz - f).abs();
            if best.is_none_or(|(_, bd)| d < bd) {
                best = Some((s, d));
            }
        }
        let (s, d) = best.expect("non-empty model");
        if d > 0.5 * self.kappa_ghz {
            return Err(QecError::AmbiguousFrequency(format!(
                "measured {measured_ghz} GHz is {d:.3e} GHz from the nearest class"
            )));
        }
        Ok(s)
    }
}

/// Pre-built conditional pi pulses, one per spin, driving the error pair
/// back to the logical pair on the aligned-tone transition, together with
/// each pulse's deterministic logical frame.
#[derive(Debug, Clone)]
pub struct CorrectionPulses {
    pub schedules: Vec<PulseSchedule>,
    pub rabi_rate_ghz: f64,
    /// Residual logical Z of each pulse, recorded as a software frame.
    pub frame_z: Vec<bool>,
    /// Phase error of the frame determination per spin, rad.
    pub frame_residual_rad: Vec<f64>,
}

/// Representative (lowest index) of the flip pair reached from the logical
/// pair by flipping `spin`.
fn error_pair_rep(num_spins: usize, spin: usize) -> usize {
    let a = 1usize << spin;
    let b = ((1 << num_spins) - 1) ^ a;
    a.min(b)
}

/// Build the per-spin correction pulses for the given couplings and EDSR
/// weights. The pulse on spin j is resonant with the transition between the
/// spin-j error pair and the logical pair (other spins aligned), so a single
/// tone restores both legs of any superposition.
pub fn correction_pulses(
    pairs: &[((usize, usize), f64)],
    weights: &[Vec<f64>],
    rabi_divisor: f64,
) -> Result<CorrectionPulses, QecError> {
    let h = SpinHamiltonian::from_pairs(3, pairs);
    let frame = LogicalFrame::new(3);
    let mut schedules = Vec::new();
    let mut frame_z = Vec::new();
    let mut frame_residual = Vec::new();
    let mut rabi_min = f64::INFINITY;
    for spin in 0..3 {
        let rep = error_pair_rep(3, spin);
        // Peak Rabi rate per spin: its own transition frequency divided by
        // the divisor. 400 keeps the counter-rotating leakage below 1e-6.
        let f = (h.diagonal_ghz[rep] - h.diagonal_ghz[0]).abs();
        let rabi_rate_ghz = f / rabi_divisor;
        rabi_min = rabi_min.min(rabi_rate_ghz);
        let schedule = crate::pulse::correction_pi_pulse(&h, weights, spin, rep, rabi_rate_ghz)?;
        // The pulse's logical frame: propagate the two error basis states
        // once and compare the relative phase of the restored amplitudes.
        let dt = QEC_DT_FRACTION * schedule.max_propagation_dt(&h);
        let e0 = 1usize << spin;
        let e1 = 7 ^ e0;
        let u00 = propagate(&h, &schedule.channels, schedule.t_total_ns, dt, &StateVector::basis(3, e0))?
            .final_state()
            .amplitudes[frame.up_index()];
        let u11 = propagate(&h, &schedule.channels, schedule.t_total_ns, dt, &StateVector::basis(3, e1))?
            .final_state()
            .amplitudes[frame.down_index()];
        let relative = (u11 / u00).arg();
        let z = relative.abs() > std::f64::consts::FRAC_PI_2;
        let residual = if z {
            wrap_angle(relative - std::f64::consts::PI)
        } else {
            relative
        };
        schedules.push(schedule);
        frame_z.push(z);
        frame_residual.push(residual);
    }
    Ok(CorrectionPulses {
        schedules,
        rabi_rate_ghz: rabi_min,
        frame_z,
        frame_residual_rad: frame_residual,
    })
}

/// Outcome of one detect-and-correct cycle.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CycleReport {
    pub measured_syndrome: (i8, i8),
    pub correction_spin: Option<usize>,
    /// Logical-manifold weight of the final state.
    pub final_weight: f64,
    /// Deterministic residual logical Z recorded in software rather than
    /// physically undone.
    pub pauli_frame_z: bool,
    /// Residual phase error of the frame determination, rad.
    pub frame_phase_residual_rad: f64,
}

/// One cycle: read the syndrome from the state's stabilizer sector, project,
/// apply the conditional pi pulse on the indicated spin and report the final
/// logical weight and Pauli frame.
///
/// The syndrome "measurement" is projective: the input must lie in a single
/// stabilizer sector (a logical state with at most one bit flip does).
pub fn correct_cycle(
    state: &StateVector,
    h: &SpinHamiltonian,
    model: &SyndromeModel,
    pulses: &CorrectionPulses,
) -> Result<(StateVector, CycleReport), QecError> {
    let frame = LogicalFrame::new(3);
    // Weight per syndrome class.
    let mut weights = [0.0f64; 4];
    for config in SpinConfig::all(3) {
        let s = syndrome_of(config);
        let slot = model
            .classes
            .iter()
            .position(|(k, _)| *k == s)
            .expect("class present");
        weights[slot] += state.population(config.index());
    }
    let (slot, &weight) = weights
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("four classes");
    if weight < 1.0 - 1e-9 {
        return Err(QecError::UncorrectableState(format!(
            "dominant stabilizer sector holds only {weight:.12} of the population"
        )));
    }
    let syndrome = model.classes[slot].0;
    // The projective measurement: classify the class frequency itself.
    let measured = model.classify(model.classes[slot].1)?;
    debug_assert_eq!(measured, syndrome);

    let spin = correction_spin(syndrome);
    let Some(spin) = spin else {
        return Ok((
            state.clone(),
            CycleReport {
                measured_syndrome: syndrome,
                correction_spin: None,
                final_weight: frame.decompose(state).weight,
                pauli_frame_z: false,
                frame_phase_residual_rad: 0.0,
            },
        ));
    };

    let schedule = &pulses.schedules[spin];
    let dt = QEC_DT_FRACTION * schedule.max_propagation_dt(h);
    let corrected = propagate(h, &schedule.channels, schedule.t_total_ns, dt, state)?
        .final_state()
        .clone();

    let report = CycleReport {
        measured_syndrome: syndrome,
        correction_spin: Some(spin),
        final_weight: frame.decompose(&corrected).weight,
        pauli_frame_z: pulses.frame_z[spin],
        frame_phase_residual_rad: pulses.frame_residual_rad[spin],
    };
    Ok((corrected, report))
}

/// Overlap of the corrected state with the expected logical state, after
/// applying the recorded Pauli frame and modding out the global phase.
pub fn overlap_up_to_frame(
    expected: &StateVector,
    corrected: &StateVector,
    report: &CycleReport,
) -> f64 {
    let frame = LogicalFrame::new(3);
    let mut adjusted = corrected.clone();
    if report.pauli_frame_z {
        let idx = frame.down_index();
        adjusted.amplitudes[idx] = -adjusted.amplitudes[idx];
    }
    expected.overlap(&adjusted).norm()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::presets;
    use nalgebra::DVector;
    use num_complex::Complex64;

    fn opts() -> SolverOptions {
        SolverOptions::default()
    }

    fn paper_circuit() -> ChainCircuit {
        presets::three_spin(5.0, 5.0)
    }

    #[test]
    fn rz_zero_flux_gives_zero_phase() {
        let c = paper_circuit();
        let traj = FluxTrajectory::rect(0, 0.0, 100.0, 21);
        let rz = rz_phase(&c, &traj, &opts()).unwrap();
        assert!(rz.theta_rad.abs() < 1e-9, "theta = {}", rz.theta_rad);
    }

    #[test]
    fn rect_pulse_matches_constant_detuning_closed_form() {
        let c = paper_circuit();
        let flux = 0.3;
        let tau = 200.0;
        let traj = FluxTrajectory::rect(0, flux, tau, 41);
        let quad = rz_phase(&c, &traj, &opts()).unwrap().theta_rad;
        let closed = rz_phase_constant(&c, 0, flux, tau, &opts()).unwrap();
        assert!(
            (quad - closed).abs() < 1e-6,
            "quadrature {quad} vs closed form {closed}"
        );
        assert!(quad.abs() > 1e-3, "detuning unexpectedly small");
    }

    #[test]
    fn simpson_refinement_converges() {
        let c = paper_circuit();
        let pulse = |amp: f64| move |t: f64| amp * (std::f64::consts::PI * t / 200.0).sin().powi(2);
        let t1 = FluxTrajectory::sampled(0, 200.0, 101, pulse(0.4)).unwrap();
        let t2 = FluxTrajectory::sampled(0, 200.0, 201, pulse(0.4)).unwrap();
        let a = rz_phase(&c, &t1, &opts()).unwrap().theta_rad;
        let b = rz_phase(&c, &t2, &opts()).unwrap().theta_rad;
        assert!((a - b).abs() < 1e-8, "refinement changed theta by {}", a - b);
    }

    #[test]
    fn rz_phase_is_odd_in_the_trajectory() {
        let c = paper_circuit();
        let traj =
            FluxTrajectory::sampled(0, 150.0, 61, |t| {
                0.35 * (std::f64::consts::PI * t / 150.0).sin().powi(2)
            })
            .unwrap();
        let plus = rz_phase(&c, &traj, &opts()).unwrap().theta_rad;
        let minus = rz_phase(&c, &traj.negated(), &opts()).unwrap().theta_rad;
        assert!((plus + minus).abs() < 1e-8, "{plus} vs {minus}");
    }

    #[test]
    fn endpoint_violation_rejected() {
        let err = FluxTrajectory::sampled(0, 100.0, 11, |_| 0.2).unwrap_err();
        assert!(matches!(err, QecError::EndpointNotZero(_)));
    }

    #[test]
    fn rzz_constant_area() {
        let j = 2e-4; // GHz
        let t = 1000.0;
        let out = rzz_phase(&vec![j; 101], t, Some(2e-3)).unwrap();
        let expected = 4.0 * std::f64::consts::PI * j * t;
        assert!((out.theta_rad - expected).abs() < 1e-12);
        assert!(!out.weak_coupling_warning);

        let zero = rzz_phase(&[0.0; 11], t, None).unwrap();
        assert_eq!(zero.theta_rad, 0.0);
    }

    #[test]
    fn rzz_strong_coupling_warns() {
        let out = rzz_phase(&[2e-3; 11], 100.0, Some(1e-3)).unwrap();
        assert!(out.weak_coupling_warning);
    }

    #[test]
    fn rzz_matches_two_module_diagonal_oracle() {
        // Two three-spin modules coupled by J_inter between spin 3 of module
        // a and spin 1 of module b, evolved exactly on the 64-state diagonal
        // model; the extracted logical ZZ angle must match the area formula.
        let intra = vec![((0usize, 1usize), -3e-3), ((1, 2), -2e-3), ((0, 2), -0.3e-3)];
        let j_inter = 0.2e-3; // intra_min / 10 scale
        let t = 2000.0;

        let module = SpinHamiltonian::from_pairs(3, &intra);
        let energy = |sa: usize, sb: usize| -> f64 {
            let ca = SpinConfig::from_index(3, sa);
            let cb = SpinConfig::from_index(3, sb);
            module.diagonal_ghz[sa] + module.diagonal_ghz[sb] + j_inter * ca.spin(2) * cb.spin(0)
        };
        // Logical basis per module: all-up (index 0) and all-down (index 7).
        let idx = |logical: usize| if logical == 0 { 0usize } else { 7usize };
        let phase = |xa: usize, xb: usize| -TAU * energy(idx(xa), idx(xb)) * t;
        let combo = phase(0, 0) + phase(1, 1) - phase(0, 1) - phase(1, 0);
        let theta_oracle = -combo / 2.0;

        let area = rzz_phase(&vec![j_inter; 129], t, Some(2e-3)).unwrap().theta_rad;
        assert!(
            (theta_oracle - area).abs() < 1e-3,
            "oracle {theta_oracle} vs area {area}"
        );
    }

    fn synthetic_readout(chi12: f64, chi23: f64, chi13: f64) -> ReadoutTable {
        let f0 = 9.0;
        let freqs: Vec<f64> = SpinConfig::all(3)
            .map(|c| {
                f0 + chi12 * c.spin(0) * c.spin(1)
                    + chi23 * c.spin(1) * c.spin(2)
                    + chi13 * c.spin(0) * c.spin(2)
            })
            .collect();
        ReadoutTable {
            inductive_energies_ghz: vec![10.0; 8],
            frequencies_ghz: freqs,
            f_r0_ghz: f0,
        }
    }

    #[test]
    fn syndrome_model_classifies_all_configs() {
        let table = synthetic_readout(4e-4, 2.5e-4, 0.2e-4);
        let model = SyndromeModel::from_readout(&table, 1e-4).unwrap();
        for config in SpinConfig::all(3) {
            let f = table.frequencies_ghz[config.index()];
            let s = model.classify(f).unwrap();
            assert_eq!(s, syndrome_of(config), "config {config}");
        }
    }

    #[test]
    fn close_class_frequencies_rejected() {
        // chi12 == chi23 makes classes (-1,+1) and (+1,-1) coincide.
        let table = synthetic_readout(3e-4, 3e-4, 0.0);
        let err = SyndromeModel::from_readout(&table, 1e-4).unwrap_err();
        assert!(matches!(err, QecError::AmbiguousFrequency(_)));
    }

    #[test]
    fn out_of_band_frequency_rejected() {
        let table = synthetic_readout(4e-4, 2.5e-4, 0.2e-4);
        let model = SyndromeModel::from_readout(&table, 1e-4).unwrap();
        let err = model.classify(9.5).unwrap_err();
        assert!(matches!(err, QecError::AmbiguousFrequency(_)));
    }

    fn qec_fixture() -> &'static (SpinHamiltonian, SyndromeModel, CorrectionPulses) {
        use std::sync::OnceLock;
        static FIXTURE: OnceLock<(SpinHamiltonian, SyndromeModel, CorrectionPulses)> =
            OnceLock::new();
        FIXTURE.get_or_init(|| {
            let pairs = vec![((0usize, 1usize), -3.4e-3), ((1, 2), -1.7e-3), ((0, 2), -0.03e-3)];
            let weights = vec![
                vec![0.024, -0.0086, -0.0001],
                vec![-0.0115, 0.026, -0.0058],
                vec![-0.0001, -0.0086, 0.012],
            ];
            let h = SpinHamiltonian::from_pairs(3, &pairs);
            let table = synthetic_readout(4e-4, 2.5e-4, 0.2e-4);
            let model = SyndromeModel::from_readout(&table, 1e-4).unwrap();
            let pulses = correction_pulses(&pairs, &weights, 400.0).unwrap();
            (h, model, pulses)
        })
    }

    fn logical_superposition(a: Complex64, b: Complex64) -> StateVector {
        let mut v = DVector::from_element(8, Complex64::new(0.0, 0.0));
        let norm = (a.norm_sqr() + b.norm_sqr()).sqrt();
        v[0] = a / norm;
        v[7] = b / norm;
        StateVector::from_amplitudes(v)
    }

    fn flip_spin_state(state: &StateVector, spin: usize) -> StateVector {
        let mut v = DVector::from_element(8, Complex64::new(0.0, 0.0));
        for i in 0..8 {
            v[i ^ (1 << spin)] = state.amplitudes[i];
        }
        StateVector::from_amplitudes(v)
    }

    #[test]
    fn clean_state_passes_through() {
        let (h, model, pulses) = qec_fixture();
        let state = logical_superposition(Complex64::new(0.6, 0.0), Complex64::new(0.0, 0.8));
        let (out, report) = correct_cycle(&state, h, model, pulses).unwrap();
        assert_eq!(report.measured_syndrome, (1, 1));
        assert_eq!(report.correction_spin, None);
        assert!((out.overlap(&state).norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn single_flip_on_all_up_is_corrected() {
        let (h, model, pulses) = qec_fixture();
        let state = flip_spin_state(&StateVector::basis(3, 0), 2);
        let (out, report) = correct_cycle(&state, h, model, pulses).unwrap();
        assert_eq!(report.measured_syndrome, (1, -1));
        assert_eq!(report.correction_spin, Some(2));
        assert!(
            report.final_weight > 1.0 - 1e-6,
            "W = {}",
            report.final_weight
        );
        assert!(out.population(0) + out.population(7) > 1.0 - 1e-6);
    }

    #[test]
    fn superposition_flip_corrected_up_to_frame() {
        let (h, model, pulses) = qec_fixture();
        let original = logical_superposition(
            Complex64::new(0.48, 0.36),
            Complex64::new(-0.6, 0.53),
        );
        for spin in 0..3 {
            let errored = flip_spin_state(&original, spin);
            let (out, report) = correct_cycle(&errored, h, model, pulses).unwrap();
            assert_eq!(report.correction_spin, Some(spin));
            assert!(report.final_weight > 1.0 - 1e-6, "spin {spin}: W = {}", report.final_weight);
            let overlap = overlap_up_to_frame(&original, &out, &report);
            assert!(
                (overlap - 1.0).abs() < 1e-6,
                "spin {spin}: overlap {overlap}, frame Z = {}",
                report.pauli_frame_z
            );
        }
    }

    #[test]
    fn sector_straddling_state_is_uncorrectable() {
        let (h, model, pulses) = qec_fixture();
        let mut v = DVector::from_element(8, Complex64::new(0.0, 0.0));
        v[0] = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        v[1] = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        let err = correct_cycle(&StateVector::from_amplitudes(v), h, model, pulses).unwrap_err();
        assert!(matches!(err, QecError::UncorrectableState(_)));
    }
}
