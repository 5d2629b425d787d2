//! Pulse construction and optimal control for logical R_X gates: the
//! three-pi-pulse sequence, the pi/2-pi sandwich for arbitrary angles, and a
//! first-order Krotov optimizer for the EDSR envelopes.

use crate::dynamics::{
    hamiltonian_at, max_frequency_ghz, sector_isometries, step_unitary, Carrier,
    DriveChannel, DynamicsError, LogicalFrame, SpinHamiltonian, StateVector,
};
use nalgebra::{DMatrix, DVector, Matrix2};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PulseError {
    #[error("transitions unresolvable: min gap {min_gap_ghz:.3e} GHz < 50 x rabi rate {rabi_ghz:.3e} GHz")]
    UnresolvableTransitions { min_gap_ghz: f64, rabi_ghz: f64 },
    #[error("fidelity decreased by {drop:.3e} at iteration {iteration}")]
    MonotonicityViolation { iteration: usize, drop: f64 },
    #[error("envelope exceeds the configured bound {max_ghz} GHz (peak {peak_ghz} GHz)")]
    AmplitudeBound { max_ghz: f64, peak_ghz: f64 },
    #[error("invalid pulse input: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
}

/// Drive schedule on a uniform time grid: per-channel envelopes and carriers
/// plus the update shape mask (zero at both ends).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PulseSchedule {
    pub t_total_ns: f64,
    pub steps: usize,
    pub channels: Vec<DriveChannel>,
    /// Shape mask S(t) in [0, 1] with S(0) = S(T) = 0.
    pub mask: Vec<f64>,
    pub max_amplitude_ghz: f64,
}

impl PulseSchedule {
    pub fn dt_ns(&self) -> f64 {
        self.t_total_ns / self.steps as f64
    }

    /// Largest safe propagation step for this schedule on `h`.
    pub fn max_propagation_dt(&self, h: &SpinHamiltonian) -> f64 {
        let f_max = max_frequency_ghz(h, &self.channels);
        if f_max > 0.0 {
            1.0 / (20.0 * f_max)
        } else {
            self.dt_ns()
        }
    }

    pub fn peak_amplitude_ghz(&self) -> f64 {
        self.channels
            .iter()
            .flat_map(|c| c.envelope_ghz.iter())
            .fold(0.0f64, |m, &v| m.max(v.abs()))
    }

    pub fn validate(&self) -> Result<(), PulseError> {
        let peak = self.peak_amplitude_ghz();
        if peak > self.max_amplitude_ghz {
            return Err(PulseError::AmplitudeBound {
                max_ghz: self.max_amplitude_ghz,
                peak_ghz: peak,
            });
        }
        if self.mask.first().copied().unwrap_or(0.0) != 0.0
            || self.mask.last().copied().unwrap_or(0.0) != 0.0
        {
            return Err(PulseError::InvalidInput("shape mask must vanish at the ends".into()));
        }
        Ok(())
    }

    /// The same schedule repeated `n` times back to back.
    pub fn repeated(&self, n: usize) -> PulseSchedule {
        let mut channels = Vec::new();
        for ch in &self.channels {
            let mut envelope = Vec::with_capacity(ch.envelope_ghz.len() * n);
            for _ in 0..n {
                envelope.extend_from_slice(&ch.envelope_ghz);
            }
            channels.push(DriveChannel {
                spin: ch.spin,
                weights: ch.weights.clone(),
                carriers: ch.carriers.clone(),
                envelope_ghz: envelope,
            });
        }
        let mut mask = Vec::with_capacity(self.mask.len() * n);
        for _ in 0..n {
            mask.extend_from_slice(&self.mask);
        }
        PulseSchedule {
            t_total_ns: self.t_total_ns * n as f64,
            steps: self.steps * n,
            channels,
            mask,
            max_amplitude_ghz: self.max_amplitude_ghz,
        }
    }
}

/// Target logical rotation `R_X(theta) = exp(-i theta X_L / 2)`, diagonal in
/// the |+>, |-> basis.
#[derive(Debug, Clone, Copy)]
pub struct GateObjective {
    pub theta_rad: f64,
    pub frame: LogicalFrame,
}

impl GateObjective {
    pub fn rx(frame: LogicalFrame, theta_rad: f64) -> Self {
        Self { theta_rad, frame }
    }

    /// 2x2 target in the (+, -) basis.
    pub fn target_matrix(&self) -> Matrix2<Complex64> {
        Matrix2::new(
            Complex64::from_polar(1.0, -0.5 * self.theta_rad),
            Complex64::new(0.0, 0.0),
            Complex64::new(0.0, 0.0),
            Complex64::from_polar(1.0, 0.5 * self.theta_rad),
        )
    }

    pub fn objective_states(&self) -> [StateVector; 2] {
        [self.frame.x_eigenstate(true), self.frame.x_eigenstate(false)]
    }

    pub fn target_states(&self) -> [StateVector; 2] {
        let t = self.target_matrix();
        let mut plus = self.frame.x_eigenstate(true);
        let mut minus = self.frame.x_eigenstate(false);
        plus.amplitudes *= t[(0, 0)];
        minus.amplitudes *= t[(1, 1)];
        [plus, minus]
    }
}

/// Subspace-trace gate fidelity `|tr(P U_target^dag U_sim P)|^2 / 4`: equal
/// to 1 iff the simulated gate matches the target on the logical manifold up
/// to a global phase.
pub fn gate_fidelity(u_sim: &Matrix2<Complex64>, objective: &GateObjective) -> f64 {
    let product = objective.target_matrix().adjoint() * u_sim;
    let trace = product[(0, 0)] + product[(1, 1)];
    trace.norm_sqr() / 4.0
}

/// Result of propagating the two logical basis states through a schedule.
#[derive(Debug, Clone)]
pub struct LogicalGateSim {
    /// `matrix[a][b] = <a | psi_b(T)>` in the (+, -) basis.
    pub matrix: Matrix2<Complex64>,
    /// Final logical-manifold weights of the evolved |+> and |-> states.
    pub final_weights: [f64; 2],
}

/// Propagate |+> and |-> through the schedule and project the result back
/// onto the logical manifold.
pub fn simulate_logical_gate(
    h: &SpinHamiltonian,
    schedule: &PulseSchedule,
    dt_ns: f64,
) -> Result<LogicalGateSim, PulseError> {
    let frame = LogicalFrame::new(h.num_spins);
    let basis = [frame.x_eigenstate(true), frame.x_eigenstate(false)];
    let mut matrix = Matrix2::from_element(Complex64::new(0.0, 0.0));
    let mut weights = [0.0; 2];
    for (b, start) in basis.iter().enumerate() {
        let traj =
            crate::dynamics::propagate(h, &schedule.channels, schedule.t_total_ns, dt_ns, start)?;
        let end = traj.final_state();
        for (a, probe) in basis.iter().enumerate() {
            matrix[(a, b)] = probe.overlap(end);
        }
        weights[b] = frame.decompose(end).weight;
    }
    Ok(LogicalGateSim { matrix, final_weights: weights })
}

/// One resonant hop of a pulse sequence in the flip-pair level structure.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChainHop {
    pub spin: usize,
    /// Pair representatives (lowest config index of each flip pair).
    pub from_pair: usize,
    pub to_pair: usize,
    pub frequency_ghz: f64,
    pub rotation_rad: f64,
    pub carrier_phase_rad: f64,
}

/// The analytically expected transition chain of a constructed sequence.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TransitionChain {
    pub hops: Vec<ChainHop>,
}

struct Segment {
    spin: usize,
    frequency_ghz: f64,
    phase_rad: f64,
    /// Rotation angle: pi for a full transfer.
    rotation_rad: f64,
    /// Peak instantaneous Rabi rate M |g|, GHz.
    rabi_peak_ghz: f64,
    /// Matrix-element magnitude |g| for this hop.
    element: f64,
}

impl Segment {
    fn duration_ns(&self) -> f64 {
        // sin^2 envelope: rotation = pi * (M_pk |g|) * tau.
        self.rotation_rad / (std::f64::consts::PI * self.rabi_peak_ghz)
    }
}

/// Sector-block matrix element of the drive on `spin` between two flip
/// pairs, in the + sector.
fn sector_element(
    num_spins: usize,
    weights: &[Vec<f64>],
    spin: usize,
    from_pair: usize,
    to_pair: usize,
) -> Complex64 {
    let mut row = weights[spin].clone();
    row[spin] = 0.0;
    let ch = DriveChannel {
        spin,
        weights: row,
        carriers: vec![],
        envelope_ghz: vec![],
    };
    let op = ch.operator(num_spins);
    let (p_plus, _) = sector_isometries(num_spins);
    let block = &p_plus * op * p_plus.adjoint();
    block[(to_pair, from_pair)]
}

/// Assemble a uniform-grid schedule from sequential segments, normalizing
/// each discrete envelope area to the exact rotation angle.
fn assemble_schedule(
    weights: &[Vec<f64>],
    segments: &[Segment],
    cells_per_segment: usize,
) -> PulseSchedule {
    let durations: Vec<f64> = segments.iter().map(Segment::duration_ns).collect();
    let t_total: f64 = durations.iter().sum();
    let cell = durations
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min)
        / cells_per_segment as f64;
    let steps = ((t_total / cell).ceil() as usize).clamp(500, 20_000);
    assemble_schedule_on_grid(weights, segments, steps)
}

/// Assemble sequential segments onto a uniform grid of `steps` cells,
/// normalizing each discrete envelope area to the exact rotation angle.
fn assemble_schedule_on_grid(
    weights: &[Vec<f64>],
    segments: &[Segment],
    steps: usize,
) -> PulseSchedule {
    let durations: Vec<f64> = segments.iter().map(Segment::duration_ns).collect();
    let t_total: f64 = durations.iter().sum();
    let dt = t_total / steps as f64;

    let mut channels = Vec::new();
    let mut mask = vec![0.0f64; steps];
    let mut t0 = 0.0;
    for (seg, &tau) in segments.iter().zip(&durations) {
        let mut envelope = vec![0.0; steps];
        let peak_m = seg.rabi_peak_ghz / seg.element;
        for (i, e) in envelope.iter_mut().enumerate() {
            let t_mid = (i as f64 + 0.5) * dt;
            if t_mid >= t0 && t_mid < t0 + tau {
                let x = (t_mid - t0) / tau;
                let shape = (std::f64::consts::PI * x).sin().powi(2);
                *e = peak_m * shape;
                mask[i] = mask[i].max(shape);
            }
        }
        // Envelopes are pinned to zero at the schedule ends; the area
        // renormalization below absorbs the clipped cells.
        envelope[0] = 0.0;
        envelope[steps - 1] = 0.0;
        // Normalize the discrete area so that 2 pi |g| sum(M dt) equals the
        // requested rotation exactly.
        let area: f64 = envelope.iter().sum::<f64>() * dt;
        let target_area = seg.rotation_rad / (std::f64::consts::TAU * seg.element);
        if area > 0.0 {
            let scale = target_area / area;
            for e in &mut envelope {
                *e *= scale;
            }
        }
        let mut w = weights[seg.spin].clone();
        w[seg.spin] = 0.0;
        channels.push(DriveChannel {
            spin: seg.spin,
            weights: w,
            carriers: vec![Carrier {
                frequency_ghz: seg.frequency_ghz,
                phase_rad: seg.phase_rad,
            }],
            envelope_ghz: envelope,
        });
        t0 += tau;
    }
    if let Some(first) = mask.first_mut() {
        *first = 0.0;
    }
    if let Some(last) = mask.last_mut() {
        *last = 0.0;
    }
    PulseSchedule {
        t_total_ns: t_total,
        steps,
        channels,
        mask,
        max_amplitude_ghz: 1.0,
    }
}

/// The flip-pair loop of the three-pulse logical X: all-up pair -> spin-0
/// error pair -> (spin0,spin1) pair -> back, with the conditional frequency
/// of each hop.
fn sequence_hops(_h: &SpinHamiltonian) -> [(usize, usize, usize); 3] {
    // (spin to drive, from pair rep, to pair rep)
    [(0, 0, 1), (1, 1, 3), (2, 3, 0)]
}

fn hop_frequency(h: &SpinHamiltonian, from_pair: usize, to_pair: usize) -> f64 {
    (h.diagonal_ghz[to_pair] - h.diagonal_ghz[from_pair]).abs()
}

fn check_resolvable(frequencies: &[f64], rabi_ghz: f64) -> Result<(), PulseError> {
    let min_gap = frequencies.iter().cloned().fold(f64::INFINITY, f64::min);
    if min_gap < 50.0 * rabi_ghz {
        return Err(PulseError::UnresolvableTransitions {
            min_gap_ghz: min_gap,
            rabi_ghz,
        });
    }
    Ok(())
}

/// Three sequential resonant pi pulses around the flip-pair loop; the drive
/// blocks change sign between the X sectors on exactly one hop, so the loop
/// accumulates a relative logical phase of pi: a logical R_X(pi).
pub fn three_pi_sequence(
    pairs: &[((usize, usize), f64)],
    weights: &[Vec<f64>],
    rabi_rate_ghz: f64,
) -> Result<(PulseSchedule, TransitionChain), PulseError> {
    let h = SpinHamiltonian::from_pairs(3, pairs);
    let mut segments = Vec::new();
    let mut hops = Vec::new();
    let mut freqs = Vec::new();
    for &(spin, from, to) in sequence_hops(&h).iter() {
        let f = hop_frequency(&h, from, to);
        let g = sector_element(3, weights, spin, from, to).norm();
        if g == 0.0 {
            return Err(PulseError::InvalidInput(format!(
                "zero matrix element for spin {spin} hop"
            )));
        }
        freqs.push(f);
        segments.push(Segment {
            spin,
            frequency_ghz: f,
            phase_rad: 0.0,
            rotation_rad: std::f64::consts::PI,
            rabi_peak_ghz: rabi_rate_ghz,
            element: g,
        });
        hops.push(ChainHop {
            spin,
            from_pair: from,
            to_pair: to,
            frequency_ghz: f,
            rotation_rad: std::f64::consts::PI,
            carrier_phase_rad: 0.0,
        });
    }
    check_resolvable(&freqs, rabi_rate_ghz)?;
    let schedule = assemble_schedule(weights, &segments, 400);
    Ok((schedule, TransitionChain { hops }))
}

/// Arbitrary logical rotation via the pi/2-pi Hadamard sandwich: a
/// manifold-independent Hadamard between the lowest and third level, a
/// sector-antisymmetric rotation by theta between those levels, and the
/// inverse Hadamard.
pub fn sequence_arbitrary_theta(
    pairs: &[((usize, usize), f64)],
    weights: &[Vec<f64>],
    rabi_rate_ghz: f64,
    theta_rad: f64,
) -> Result<(PulseSchedule, TransitionChain), PulseError> {
    let (segments, hops, freqs) = sandwich_segments(pairs, weights, rabi_rate_ghz, theta_rad)?;
    check_resolvable(&freqs, rabi_rate_ghz)?;
    let schedule = assemble_schedule(weights, &segments, 400);
    Ok((schedule, TransitionChain { hops }))
}

type SegmentPlan = (Vec<Segment>, Vec<ChainHop>, Vec<f64>);

/// Segments of the pi/2-pi sandwich (no resolvability check).
fn sandwich_segments(
    pairs: &[((usize, usize), f64)],
    weights: &[Vec<f64>],
    rabi_rate_ghz: f64,
    theta_rad: f64,
) -> Result<SegmentPlan, PulseError> {
    let h = SpinHamiltonian::from_pairs(3, pairs);
    let hop_a = (0usize, 0usize, 1usize);
    let hop_b = (1usize, 1usize, 3usize);
    let hop_c = (2usize, 0usize, 3usize);

    let phase_of = |spin: usize, from: usize, to: usize, phi: f64| -> (f64, f64, Complex64) {
        let f = hop_frequency(&h, from, to);
        let g = sector_element(3, weights, spin, from, to);
        // Interaction-picture hop phase zeta = arg(g_to,from) - sgn(E_to - E_from) phi.
        let sgn = if h.diagonal_ghz[to] > h.diagonal_ghz[from] { 1.0 } else { -1.0 };
        (f, g.arg() - sgn * phi, g)
    };

    let (f_a, zeta_a, g_a) = phase_of(hop_a.0, hop_a.1, hop_a.2, 0.0);
    let (f_b, zeta_b, g_b) = phase_of(hop_b.0, hop_b.1, hop_b.2, 0.0);
    if g_a.norm() == 0.0 || g_b.norm() == 0.0 {
        return Err(PulseError::InvalidInput("zero matrix element in Hadamard hops".into()));
    }
    // After the pi/2 and pi pulses the + sector state is
    // (|0> - e^{i(zeta_a + zeta_b)} |2>)/sqrt(2); align the middle rotation
    // axis so this is its +1 eigenstate.
    let f_c = hop_frequency(&h, hop_c.1, hop_c.2);
    let g_c = sector_element(3, weights, hop_c.0, hop_c.1, hop_c.2);
    if g_c.norm() == 0.0 {
        return Err(PulseError::InvalidInput("zero matrix element in phase hop".into()));
    }
    let sgn_c = if h.diagonal_ghz[hop_c.2] > h.diagonal_ghz[hop_c.1] { 1.0 } else { -1.0 };
    let zeta_c = zeta_a + zeta_b + std::f64::consts::PI;
    let phi_c = sgn_c * (g_c.arg() - zeta_c);

    let seg = |spin: usize, f: f64, phase: f64, rotation: f64, g: f64| Segment {
        spin,
        frequency_ghz: f,
        phase_rad: phase,
        rotation_rad: rotation,
        rabi_peak_ghz: rabi_rate_ghz,
        element: g,
    };
    let pi = std::f64::consts::PI;
    let (theta_seg, phi_seg) = if theta_rad < 0.0 {
        (-theta_rad, phi_c + pi)
    } else {
        (theta_rad.max(1e-6), phi_c)
    };
    let segments = vec![
        seg(hop_a.0, f_a, 0.0, pi / 2.0, g_a.norm()),
        seg(hop_b.0, f_b, 0.0, pi, g_b.norm()),
        seg(hop_c.0, f_c, phi_seg, theta_seg, g_c.norm()),
        seg(hop_b.0, f_b, pi, pi, g_b.norm()),
        seg(hop_a.0, f_a, pi, pi / 2.0, g_a.norm()),
    ];
    let hops = segments
        .iter()
        .map(|s| ChainHop {
            spin: s.spin,
            from_pair: 0,
            to_pair: 0,
            frequency_ghz: s.frequency_ghz,
            rotation_rad: s.rotation_rad,
            carrier_phase_rad: s.phase_rad,
        })
        .collect();
    Ok((segments, hops, vec![f_a, f_b, f_c]))
}

/// Diabatic seed for the optimizer: the pi/2-pi sandwich compressed into the
/// full pulse window, far past RWA validity. It carries the right loop
/// structure and a finite relative phase, which the flat symmetric guess
/// lacks (that one sits on a stationary manifold of the update rule).
pub fn krotov_seed_schedule(
    pairs: &[((usize, usize), f64)],
    weights: &[Vec<f64>],
    theta_rad: f64,
    t_total_ns: f64,
    steps: usize,
) -> Result<PulseSchedule, PulseError> {
    // Rotation angles sum to 3 pi + theta; pick the peak rate that fills T.
    let total_rotation = 3.0 * std::f64::consts::PI + theta_rad.abs().max(1e-6);
    let rabi = total_rotation / (std::f64::consts::PI * t_total_ns);
    let (segments, _, _) = sandwich_segments(pairs, weights, rabi, theta_rad)?;
    let mut schedule = assemble_schedule_on_grid(weights, &segments, steps);
    schedule.mask = blackman_flank_mask(steps, 0.05);
    Ok(schedule)
}

/// Single sin^2 pi pulse on `spin`, resonant with the transition between
/// the given flip pair and the logical pair.
pub fn correction_pi_pulse(
    h: &SpinHamiltonian,
    weights: &[Vec<f64>],
    spin: usize,
    error_pair_rep: usize,
    rabi_rate_ghz: f64,
) -> Result<PulseSchedule, PulseError> {
    let f = hop_frequency(h, error_pair_rep, 0);
    let g = sector_element(h.num_spins, weights, spin, error_pair_rep, 0).norm();
    if g == 0.0 {
        return Err(PulseError::InvalidInput(format!(
            "zero matrix element for the spin {spin} correction"
        )));
    }
    check_resolvable(&[f], rabi_rate_ghz)?;
    let segments = [Segment {
        spin,
        frequency_ghz: f,
        phase_rad: 0.0,
        rotation_rad: std::f64::consts::PI,
        rabi_peak_ghz: rabi_rate_ghz,
        element: g,
    }];
    Ok(assemble_schedule(weights, &segments, 2000))
}

/// Options for the Krotov optimizer.
#[derive(Debug, Clone)]
pub struct KrotovOptions {
    /// Step-size parameter lambda_a; larger is more conservative.
    pub lambda_a: f64,
    pub iterations: usize,
    /// Stop early when 1 - F drops below this value.
    pub target_infidelity: Option<f64>,
    /// Tolerated per-iteration fidelity decrease before erroring.
    pub monotonicity_tolerance: f64,
}

impl Default for KrotovOptions {
    fn default() -> Self {
        Self {
            lambda_a: 3.0,
            iterations: 500,
            target_infidelity: None,
            monotonicity_tolerance: 1e-10,
        }
    }
}

/// Optimizer output: the updated schedule and the fidelity after each
/// iteration (index 0 is the unoptimized fidelity).
#[derive(Debug, Clone)]
pub struct KrotovResult {
    pub schedule: PulseSchedule,
    pub fidelity_trace: Vec<f64>,
    /// False when the iteration budget ran out before `target_infidelity`.
    pub reached_target: bool,
}

/// Initial guess for the optimizer: a small constant envelope under a
/// Blackman-flanked mask on every spin, with carriers at the two conditional
/// transition frequencies of each spin.
pub fn krotov_initial_schedule(
    pairs: &[((usize, usize), f64)],
    weights: &[Vec<f64>],
    t_total_ns: f64,
    steps: usize,
    amplitude_ghz: f64,
) -> PulseSchedule {
    let spectrum = crate::dynamics::transition_spectrum(3, pairs, 0.0)
        .expect("three-spin couplings");
    let mask = blackman_flank_mask(steps, 0.05);
    let channels = (0..3)
        .map(|spin| {
            let mut w = weights[spin].clone();
            w[spin] = 0.0;
            let t = &spectrum.per_spin[spin];
            DriveChannel {
                spin,
                weights: w,
                carriers: vec![
                    Carrier { frequency_ghz: t.aligned_ghz, phase_rad: 0.0 },
                    Carrier { frequency_ghz: t.anti_aligned_ghz, phase_rad: 0.0 },
                ],
                envelope_ghz: mask.iter().map(|&s| amplitude_ghz * s).collect(),
            }
        })
        .collect();
    PulseSchedule {
        t_total_ns,
        steps,
        channels,
        mask,
        max_amplitude_ghz: 1.0,
    }
}

/// Flat-top mask with Blackman-window flanks of the given fraction on each
/// side; exactly zero at both ends.
pub fn blackman_flank_mask(steps: usize, flank_fraction: f64) -> Vec<f64> {
    let flank = ((steps as f64 * flank_fraction).round() as usize).max(1);
    let blackman = |x: f64| {
        0.42 - 0.5 * (std::f64::consts::TAU * x).cos()
            + 0.08 * (2.0 * std::f64::consts::TAU * x).cos()
    };
    (0..steps)
        .map(|i| {
            if i < flank {
                blackman(0.5 * i as f64 / flank as f64).max(0.0)
            } else if i >= steps - flank {
                blackman(0.5 * (steps - 1 - i) as f64 / flank as f64).max(0.0)
            } else {
                1.0
            }
        })
        .collect()
}

/// First-order Krotov: co-states propagated backward from the objective with
/// the old field, envelopes updated sequentially during the new forward
/// pass, `dM(t) = (S(t)/lambda_a) Im<chi(t)| dH/dM |psi(t)>`. The fidelity
/// trace is monotone non-decreasing up to the configured tolerance.
pub fn krotov_optimize(
    h: &SpinHamiltonian,
    objective: &GateObjective,
    initial: &PulseSchedule,
    opts: &KrotovOptions,
) -> Result<KrotovResult, PulseError> {
    let steps = initial.steps;
    let dt = initial.dt_ns();
    let t_total = initial.t_total_ns;
    let f_max = max_frequency_ghz(h, &initial.channels);
    if f_max > 0.0 && dt > 1.0 / (20.0 * f_max) {
        return Err(PulseError::Dynamics(DynamicsError::StepTooLarge {
            dt,
            max_dt: 1.0 / (20.0 * f_max),
            f_max,
        }));
    }

    let mut schedule = initial.clone();
    let operators: Vec<DMatrix<Complex64>> =
        schedule.channels.iter().map(|c| c.operator(h.num_spins)).collect();
    let starts = objective.objective_states();
    let targets = objective.target_states();
    let n_states = starts.len();

    // Forward pass storing states at every node and the step propagators.
    let mut psi: Vec<Vec<DVector<Complex64>>> =
        vec![Vec::with_capacity(steps + 1); n_states];
    let mut propagators: Vec<DMatrix<Complex64>> = Vec::with_capacity(steps);
    let forward_full = |schedule: &PulseSchedule,
                        psi: &mut Vec<Vec<DVector<Complex64>>>,
                        propagators: &mut Vec<DMatrix<Complex64>>| {
        propagators.clear();
        for (k, start) in starts.iter().enumerate() {
            psi[k].clear();
            psi[k].push(start.amplitudes.clone());
        }
        for i in 0..steps {
            let t_mid = (i as f64 + 0.5) * dt;
            let hm = hamiltonian_at(h, &schedule.channels, &operators, t_mid, t_total);
            let u = step_unitary(&hm, dt);
            for state in psi.iter_mut() {
                let next = &u * state.last().unwrap();
                state.push(next);
            }
            propagators.push(u);
        }
    };
    forward_full(&schedule, &mut psi, &mut propagators);

    let fidelity_of = |psi: &[Vec<DVector<Complex64>>]| -> f64 {
        let mut c = Complex64::new(0.0, 0.0);
        for (k, target) in targets.iter().enumerate() {
            c += target.amplitudes.dotc(&psi[k][steps]);
        }
        (c / n_states as f64).norm_sqr()
    };

    let mut trace = vec![fidelity_of(&psi)];
    let mut reached = opts
        .target_infidelity
        .map(|eps| 1.0 - trace[0] < eps)
        .unwrap_or(false);

    let mut chi: Vec<Vec<DVector<Complex64>>> = vec![Vec::new(); n_states];
    for _iter in 0..opts.iterations {
        if reached {
            break;
        }
        // Terminal co-states chi_k(T) = (c / M) |target_k>.
        let mut c = Complex64::new(0.0, 0.0);
        for (k, target) in targets.iter().enumerate() {
            c += target.amplitudes.dotc(&psi[k][steps]);
        }
        c /= n_states as f64;
        for (k, target) in targets.iter().enumerate() {
            let mut backward = Vec::with_capacity(steps + 1);
            backward.push(&target.amplitudes * c);
            for i in (0..steps).rev() {
                let prev = propagators[i].adjoint() * backward.last().unwrap();
                backward.push(prev);
            }
            backward.reverse();
            chi[k] = backward;
        }

        // Sequential forward update.
        let mut new_psi: Vec<DVector<Complex64>> =
            starts.iter().map(|s| s.amplitudes.clone()).collect();
        for (k, state) in new_psi.iter().enumerate() {
            psi[k][0] = state.clone();
        }
        for i in 0..steps {
            let t_mid = (i as f64 + 0.5) * dt;
            for (j, op) in operators.iter().enumerate() {
                let carrier = schedule.channels[j].carrier_sum(t_mid);
                if carrier == 0.0 {
                    continue;
                }
                let mut update = 0.0;
                for k in 0..n_states {
                    let driven = op * &new_psi[k];
                    update += (chi[k][i].dotc(&driven) * carrier).im;
                }
                schedule.channels[j].envelope_ghz[i] +=
                    schedule.mask[i] / opts.lambda_a * update;
            }
            let hm = hamiltonian_at(h, &schedule.channels, &operators, t_mid, t_total);
            let u = step_unitary(&hm, dt);
            for (k, state) in new_psi.iter_mut().enumerate() {
                *state = &u * &*state;
                psi[k][i + 1] = state.clone();
            }
            propagators[i] = u;
        }

        let f = fidelity_of(&psi);
        let prev = *trace.last().unwrap();
        if f < prev - opts.monotonicity_tolerance {
            return Err(PulseError::MonotonicityViolation {
                iteration: trace.len(),
                drop: prev - f,
            });
        }
        trace.push(f);
        if let Some(eps) = opts.target_infidelity {
            if 1.0 - f < eps {
                reached = true;
            }
        }
    }
    if opts.target_infidelity.is_none() {
        reached = true;
    }
    schedule.validate()?;
    Ok(KrotovResult {
        schedule,
        fidelity_trace: trace,
        reached_target: reached,
    })
}
