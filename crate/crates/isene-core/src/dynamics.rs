//! Spin dynamics in the 2^N-dimensional configuration space: the diagonal
//! static Hamiltonian built from pair couplings, EDSR drive channels, exact
//! piecewise-constant propagation, the X parity symmetry and the logical
//! manifold bookkeeping.
//!
//! Conventions: energies E/h in GHz, time in ns, so one propagation step is
//! `exp(-i 2 pi H dt)`.

use crate::circuit::SpinConfig;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DynamicsError {
    #[error("time step {dt} ns too large; need dt <= {max_dt} ns for f_max = {f_max} GHz")]
    StepTooLarge { dt: f64, max_dt: f64, f_max: f64 },
    #[error("X symmetry violated by {term}: commutator norm {norm:.3e}")]
    SymmetryViolation { term: String, norm: f64 },
    #[error("logical frame invalid: {0}")]
    InvalidFrame(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("transition spectrum requires 3 spins, got {0}")]
    NotThreeSpins(usize),
}

/// Hilbert-space dimension for `n` spins.
pub fn dim(num_spins: usize) -> usize {
    1 << num_spins
}

/// Pairwise couplings keyed by 0-based spin pairs (h, j) with h < j, GHz.
pub type PairCouplings = Vec<((usize, usize), f64)>;

/// Diagonal static Hamiltonian in the z-configuration basis, GHz.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpinHamiltonian {
    pub num_spins: usize,
    /// Diagonal entries indexed by config index, GHz.
    pub diagonal_ghz: Vec<f64>,
}

impl SpinHamiltonian {
    /// Build `sum_{h<j} J_hj sigma_h sigma_j` from pairwise couplings in GHz.
    pub fn from_pairs(num_spins: usize, pairs: &[((usize, usize), f64)]) -> Self {
        let diagonal = SpinConfig::all(num_spins)
            .map(|c| {
                pairs
                    .iter()
                    .map(|&((h, j), v)| v * c.spin(h) * c.spin(j))
                    .sum()
            })
            .collect();
        Self {
            num_spins,
            diagonal_ghz: diagonal,
        }
    }

    pub fn dim(&self) -> usize {
        dim(self.num_spins)
    }

    pub fn matrix(&self) -> DMatrix<Complex64> {
        let d = self.dim();
        DMatrix::from_fn(d, d, |r, c| {
            if r == c {
                Complex64::new(self.diagonal_ghz[r], 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
    }

    /// Largest level splitting, GHz.
    pub fn max_gap_ghz(&self) -> f64 {
        let lo = self.diagonal_ghz.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = self.diagonal_ghz.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        hi - lo
    }
}

/// One carrier tone, evaluated as `cos(2 pi f t + phase)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Carrier {
    pub frequency_ghz: f64,
    pub phase_rad: f64,
}

impl Carrier {
    pub fn evaluate(&self, t_ns: f64) -> f64 {
        (TAU * self.frequency_ghz * t_ns + self.phase_rad).cos()
    }
}

/// An EDSR drive line on one spin: operator
/// `sigma_y^{(j)} sum_{k != j} w_k sigma_z^{(k)}` with an envelope in GHz
/// and a carrier list. The self weight `w_j` is normally zero; when set it
/// adds a `w_j sigma_x^{(j)}`-type term for sensitivity studies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriveChannel {
    pub spin: usize,
    /// Spin weights, one per spin; index `spin` is the self term.
    pub weights: Vec<f64>,
    pub carriers: Vec<Carrier>,
    /// Envelope samples over the schedule duration, GHz (piecewise constant).
    pub envelope_ghz: Vec<f64>,
}

impl DriveChannel {
    /// Dimensionless drive operator in the z basis: purely imaginary and
    /// antisymmetric, connecting configs that differ by one flip of `spin`.
    pub fn operator(&self, num_spins: usize) -> DMatrix<Complex64> {
        let d = dim(num_spins);
        let mut m = DMatrix::from_element(d, d, Complex64::new(0.0, 0.0));
        for index in 0..d {
            let config = SpinConfig::from_index(num_spins, index);
            let target = index ^ (1 << self.spin);
            // sigma_y |up> = i |down>, sigma_y |down> = -i |up>
            let eta = if config.spin(self.spin) > 0.0 { 1.0 } else { -1.0 };
            let weight: f64 = self
                .weights
                .iter()
                .enumerate()
                .filter(|&(k, _)| k != self.spin)
                .map(|(k, &w)| w * config.spin(k))
                .sum();
            // The diagonal weight enters as a sigma_x-type term: Hermitian
            // and X-symmetric, unlike a naive sigma_y sigma_z product.
            m[(target, index)] = Complex64::new(self.weights[self.spin], eta * weight);
        }
        m
    }

    /// Envelope value at time `t` of a schedule of duration `t_total`.
    pub fn envelope_at(&self, t_ns: f64, t_total_ns: f64) -> f64 {
        if self.envelope_ghz.is_empty() {
            return 0.0;
        }
        let idx = ((t_ns / t_total_ns) * self.envelope_ghz.len() as f64).floor() as usize;
        self.envelope_ghz[idx.min(self.envelope_ghz.len() - 1)]
    }

    pub fn carrier_sum(&self, t_ns: f64) -> f64 {
        self.carriers.iter().map(|c| c.evaluate(t_ns)).sum()
    }

    pub fn max_carrier_ghz(&self) -> f64 {
        self.carriers
            .iter()
            .map(|c| c.frequency_ghz.abs())
            .fold(0.0, f64::max)
    }
}

/// Normalized state in the z-configuration basis.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    pub amplitudes: DVector<Complex64>,
}

impl StateVector {
    pub fn basis(num_spins: usize, index: usize) -> Self {
        let mut v = DVector::from_element(dim(num_spins), Complex64::new(0.0, 0.0));
        v[index] = Complex64::new(1.0, 0.0);
        Self { amplitudes: v }
    }

    pub fn from_amplitudes(amps: DVector<Complex64>) -> Self {
        Self { amplitudes: amps }
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.norm()
    }

    pub fn normalize(&mut self) {
        let n = self.norm();
        if n > 0.0 {
            self.amplitudes /= Complex64::new(n, 0.0);
        }
    }

    pub fn overlap(&self, other: &StateVector) -> Complex64 {
        self.amplitudes.dotc(&other.amplitudes)
    }

    pub fn population(&self, index: usize) -> f64 {
        self.amplitudes[index].norm_sqr()
    }
}

/// Matrix exponential by scaling and squaring with a Taylor kernel; exact to
/// machine precision for the anti-Hermitian step generators used here.
pub fn expm(a: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let d = a.nrows();
    let norm = a
        .row_iter()
        .map(|r| r.iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max);
    let squarings = if norm > 0.25 {
        (norm / 0.25).log2().ceil() as u32
    } else {
        0
    };
    let scale = Complex64::new(1.0 / 2f64.powi(squarings as i32), 0.0);
    let b = a * scale;

    let mut result = DMatrix::identity(d, d);
    let mut term = DMatrix::identity(d, d);
    for k in 1..=14u32 {
        term = (&term * &b) / Complex64::new(k as f64, 0.0);
        result += &term;
    }
    for _ in 0..squarings {
        result = &result * &result;
    }
    result
}

/// Propagation step: `exp(-i 2 pi H dt)` for H in GHz, dt in ns.
pub fn step_unitary(h_ghz: &DMatrix<Complex64>, dt_ns: f64) -> DMatrix<Complex64> {
    expm(&(h_ghz * Complex64::new(0.0, -TAU * dt_ns)))
}

/// Dense Hamiltonian at time `t` given the static part and drive channels.
pub fn hamiltonian_at(
    h: &SpinHamiltonian,
    channels: &[DriveChannel],
    operators: &[DMatrix<Complex64>],
    t_ns: f64,
    t_total_ns: f64,
) -> DMatrix<Complex64> {
    let mut m = h.matrix();
    for (ch, op) in channels.iter().zip(operators) {
        let amp = ch.envelope_at(t_ns, t_total_ns) * ch.carrier_sum(t_ns);
        if amp != 0.0 {
            m += op * Complex64::new(amp, 0.0);
        }
    }
    m
}

/// Time-sampled propagation output.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times_ns: Vec<f64>,
    pub states: Vec<StateVector>,
}

impl Trajectory {
    pub fn final_state(&self) -> &StateVector {
        self.states.last().expect("non-empty trajectory")
    }
}

/// Largest frequency in the problem: carriers and static level gaps, GHz.
pub fn max_frequency_ghz(h: &SpinHamiltonian, channels: &[DriveChannel]) -> f64 {
    channels
        .iter()
        .map(DriveChannel::max_carrier_ghz)
        .fold(h.max_gap_ghz(), f64::max)
}

/// Propagate `psi0` under the static Hamiltonian plus drives for
/// `t_total_ns`, with piecewise-constant steps of `dt_ns` evaluated at the
/// step midpoint. States are sampled every `max(dt, T/5000)`.
pub fn propagate(
    h: &SpinHamiltonian,
    channels: &[DriveChannel],
    t_total_ns: f64,
    dt_ns: f64,
    psi0: &StateVector,
) -> Result<Trajectory, DynamicsError> {
    let d = h.dim();
    if psi0.amplitudes.len() != d {
        return Err(DynamicsError::Dimension {
            expected: d,
            got: psi0.amplitudes.len(),
        });
    }
    let f_max = max_frequency_ghz(h, channels);
    if f_max > 0.0 && dt_ns > 1.0 / (20.0 * f_max) {
        return Err(DynamicsError::StepTooLarge {
            dt: dt_ns,
            max_dt: 1.0 / (20.0 * f_max),
            f_max,
        });
    }

    let operators: Vec<_> = channels.iter().map(|c| c.operator(h.num_spins)).collect();
    let steps = (t_total_ns / dt_ns).ceil() as usize;
    let stride = ((t_total_ns / 5000.0) / dt_ns).ceil().max(1.0) as usize;

    let mut psi = psi0.amplitudes.clone();
    let mut times = vec![0.0];
    let mut states = vec![psi0.clone()];
    let mut t = 0.0;
    for step in 0..steps {
        let dt = dt_ns.min(t_total_ns - t);
        if dt <= 0.0 {
            break;
        }
        let h_mid = hamiltonian_at(h, channels, &operators, t + 0.5 * dt, t_total_ns);
        psi = step_unitary(&h_mid, dt) * psi;
        t += dt;
        if (step + 1) % stride == 0 || step + 1 == steps {
            times.push(t);
            states.push(StateVector::from_amplitudes(psi.clone()));
        }
    }
    Ok(Trajectory { times_ns: times, states })
}

/// Conditional single-spin transition frequencies for a three-spin chain:
/// for each spin the splitting with the other two aligned and anti-aligned.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TransitionSpectrum {
    /// `(spin, aligned frequency, anti-aligned frequency)`, GHz.
    pub per_spin: Vec<SpinTransitions>,
    /// Pairs of near-coincident frequencies `(label_a, label_b)` within the
    /// resolvability threshold.
    pub degenerate_pairs: Vec<(String, String)>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpinTransitions {
    pub spin: usize,
    /// |2 (J_jk + J_jl)|: other two spins aligned, GHz.
    pub aligned_ghz: f64,
    /// |2 (J_jk - J_jl)|: other two spins anti-aligned, GHz.
    pub anti_aligned_ghz: f64,
}

/// Conditional transition frequencies from the three pair couplings.
pub fn transition_spectrum(
    num_spins: usize,
    pairs: &[((usize, usize), f64)],
    resolvability_ghz: f64,
) -> Result<TransitionSpectrum, DynamicsError> {
    if num_spins != 3 {
        return Err(DynamicsError::NotThreeSpins(num_spins));
    }
    let j = |a: usize, b: usize| -> f64 {
        pairs
            .iter()
            .find(|&&((h, k), _)| (h, k) == (a.min(b), a.max(b)))
            .map(|&(_, v)| v)
            .unwrap_or(0.0)
    };
    let mut per_spin = Vec::new();
    for spin in 0..3 {
        let others: Vec<usize> = (0..3).filter(|&k| k != spin).collect();
        let (k, l) = (others[0], others[1]);
        per_spin.push(SpinTransitions {
            spin,
            aligned_ghz: (2.0 * (j(spin, k) + j(spin, l))).abs(),
            anti_aligned_ghz: (2.0 * (j(spin, k) - j(spin, l))).abs(),
        });
    }
    let mut labelled: Vec<(String, f64)> = Vec::new();
    for t in &per_spin {
        labelled.push((format!("spin{}_aligned", t.spin), t.aligned_ghz));
        labelled.push((format!("spin{}_anti", t.spin), t.anti_aligned_ghz));
    }
    let mut degenerate = Vec::new();
    for a in 0..labelled.len() {
        for b in a + 1..labelled.len() {
            if (labelled[a].1 - labelled[b].1).abs() < resolvability_ghz {
                degenerate.push((labelled[a].0.clone(), labelled[b].0.clone()));
            }
        }
    }
    Ok(TransitionSpectrum {
        per_spin,
        degenerate_pairs: degenerate,
    })
}

/// Logical manifold bookkeeping: the all-up / all-down pair and the X
/// eigenstates |+-> = (|up..> +- |down..>)/sqrt(2).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogicalFrame {
    pub num_spins: usize,
}

/// Weights and phases of a state on the logical manifold.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct LogicalDecomposition {
    pub alpha_plus: f64,
    pub phi_plus: f64,
    pub alpha_minus: f64,
    pub phi_minus: f64,
    /// Total logical-manifold weight `alpha_+^2 + alpha_-^2`.
    pub weight: f64,
}

impl LogicalDecomposition {
    /// Relative angle between the |+> and |-> components.
    pub fn relative_angle(&self) -> f64 {
        self.phi_plus - self.phi_minus
    }
}

impl LogicalFrame {
    pub fn new(num_spins: usize) -> Self {
        Self { num_spins }
    }

    pub fn up_index(&self) -> usize {
        0
    }

    pub fn down_index(&self) -> usize {
        dim(self.num_spins) - 1
    }

    /// |+> or |-> as a state vector.
    pub fn x_eigenstate(&self, plus: bool) -> StateVector {
        let d = dim(self.num_spins);
        let mut v = DVector::from_element(d, Complex64::new(0.0, 0.0));
        let a = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        v[self.up_index()] = a;
        v[self.down_index()] = if plus { a } else { -a };
        StateVector::from_amplitudes(v)
    }

    /// Check that the logical pair spans the two lowest, degenerate levels.
    pub fn validate(&self, h: &SpinHamiltonian) -> Result<(), DynamicsError> {
        let e_up = h.diagonal_ghz[self.up_index()];
        let e_down = h.diagonal_ghz[self.down_index()];
        if (e_up - e_down).abs() > 1e-9 {
            return Err(DynamicsError::InvalidFrame(format!(
                "logical pair split by {:.3e} GHz",
                e_up - e_down
            )));
        }
        for (index, &e) in h.diagonal_ghz.iter().enumerate() {
            if index != self.up_index() && index != self.down_index() && e <= e_up {
                return Err(DynamicsError::InvalidFrame(format!(
                    "config {index} at {e} GHz is not above the logical pair"
                )));
            }
        }
        Ok(())
    }

    pub fn decompose(&self, psi: &StateVector) -> LogicalDecomposition {
        let plus = self.x_eigenstate(true).overlap(psi);
        let minus = self.x_eigenstate(false).overlap(psi);
        LogicalDecomposition {
            alpha_plus: plus.norm(),
            phi_plus: plus.arg(),
            alpha_minus: minus.norm(),
            phi_minus: minus.arg(),
            weight: plus.norm_sqr() + minus.norm_sqr(),
        }
    }
}

/// The parity operator `X = sigma_x^(1) ... sigma_x^(N)` as a dense matrix.
pub fn x_operator(num_spins: usize) -> DMatrix<Complex64> {
    let d = dim(num_spins);
    let mut m = DMatrix::from_element(d, d, Complex64::new(0.0, 0.0));
    for index in 0..d {
        m[(d - 1 - index, index)] = Complex64::new(1.0, 0.0);
    }
    m
}

fn commutator_norm(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> f64 {
    let c = a * b - b * a;
    c.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Commutator norms of the static and drive parts with X, plus the sector
/// block structure.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct XSymmetryReport {
    pub static_commutator: f64,
    pub drive_commutators: Vec<f64>,
    /// `max |H_sigma^+ - H_sigma^-|` over the sector blocks.
    pub static_sector_mismatch: f64,
    /// `max |H_d^+ + H_d^-|`: drive blocks carry opposite signs.
    pub drive_sector_antisymmetry: Vec<f64>,
}

/// Isometries onto the +/- sectors of X, rows indexed by flip pairs. The
/// minus sector carries the parity gauge `(-1)^(number of down spins)`, which
/// makes the drive blocks exact negatives of each other.
pub fn sector_isometries(num_spins: usize) -> (DMatrix<Complex64>, DMatrix<Complex64>) {
    let d = dim(num_spins);
    let half = d / 2;
    let a = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    let mut p_plus = DMatrix::from_element(half, d, Complex64::new(0.0, 0.0));
    let mut p_minus = DMatrix::from_element(half, d, Complex64::new(0.0, 0.0));
    for rep in 0..half {
        let partner = d - 1 - rep;
        p_plus[(rep, rep)] = a;
        p_plus[(rep, partner)] = a;
        let sign_rep = if (rep.count_ones()) % 2 == 0 { 1.0 } else { -1.0 };
        let sign_partner = if (partner.count_ones()).is_multiple_of(2) { 1.0 } else { -1.0 };
        p_minus[(rep, rep)] = a * Complex64::new(sign_rep, 0.0);
        p_minus[(rep, partner)] = a * Complex64::new(sign_partner, 0.0);
    }
    (p_plus, p_minus)
}

/// Verify that the total Hamiltonian commutes with X and report the sector
/// block structure. Fails with the offending term when a commutator exceeds
/// 1e-12 (relative to the term's scale).
pub fn x_symmetry_report(
    h: &SpinHamiltonian,
    channels: &[DriveChannel],
) -> Result<XSymmetryReport, DynamicsError> {
    let x = x_operator(h.num_spins);
    let hm = h.matrix();
    let scale = |m: &DMatrix<Complex64>| m.iter().map(|z| z.norm()).fold(1.0, f64::max);

    let static_comm = commutator_norm(&x, &hm);
    if static_comm > 1e-12 * scale(&hm) {
        return Err(DynamicsError::SymmetryViolation {
            term: "static Hamiltonian".into(),
            norm: static_comm,
        });
    }
    let mut drive_comms = Vec::new();
    let mut ops = Vec::new();
    for ch in channels {
        let op = ch.operator(h.num_spins);
        let norm = commutator_norm(&x, &op);
        if norm > 1e-12 * scale(&op) {
            return Err(DynamicsError::SymmetryViolation {
                term: format!("drive on spin {}", ch.spin),
                norm,
            });
        }
        drive_comms.push(norm);
        ops.push(op);
    }

    let (p_plus, p_minus) = sector_isometries(h.num_spins);
    let block = |p: &DMatrix<Complex64>, m: &DMatrix<Complex64>| p * m * p.adjoint();
    let h_plus = block(&p_plus, &hm);
    let h_minus = block(&p_minus, &hm);
    let static_mismatch = (&h_plus - &h_minus).iter().map(|z| z.norm()).fold(0.0, f64::max);
    let drive_antisym = ops
        .iter()
        .map(|op| {
            let b_plus = block(&p_plus, op);
            let b_minus = block(&p_minus, op);
            (&b_plus + &b_minus).iter().map(|z| z.norm()).fold(0.0, f64::max)
        })
        .collect();
    Ok(XSymmetryReport {
        static_commutator: static_comm,
        drive_commutators: drive_comms,
        static_sector_mismatch: static_mismatch,
        drive_sector_antisymmetry: drive_antisym,
    })
}
