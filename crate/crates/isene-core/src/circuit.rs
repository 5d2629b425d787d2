//! Circuit data model: junction parameters, chain topology, node phases and
//! spin configurations, together with the exact potential energy, gradient
//! and Hessian.
//!
//! The chain has N weak links in series between the input node and ground.
//! Junction i sits between lower nodes `d_{i-1}` and `d_i` (with `d_0` the
//! input node and `d_N` ground). Vertical inductor i connects upper nodes
//! `u_{i-1}` and `u_i` through its loop (again `u_0` = input, `u_N` = ground)
//! and carries the external flux of loop i. Coupling inductor i ties `u_i`
//! to `d_i`. The phase vector is ordered `[phi_in, u_1..u_{N-1}, d_1..d_{N-1}]`,
//! input phase first.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum CircuitError {
    #[error("junction spin energy must be non-negative, got {0} GHz")]
    NegativeSpinEnergy(f64),
    #[error("inductance must be positive, got {0} nH")]
    NonPositiveInductance(f64),
    #[error("chain needs {expected} {kind}, got {got}")]
    BadTopology {
        kind: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("dimension mismatch: circuit has {circuit} phase variables, input has {input}")]
    DimensionMismatch { circuit: usize, input: usize },
    #[error("spin configuration is for {config} spins, circuit has {circuit}")]
    SpinCountMismatch { circuit: usize, config: usize },
}

/// Sign convention for the junction energy-phase term.
///
/// `NegativeCos` evaluates `-sqrt(e0^2 + e_sigma^2) cos(phi - gamma sigma)`,
/// `PositiveCos` the same with a plus sign (equivalently `e0 -> -e0`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JunctionSign {
    #[default]
    NegativeCos,
    PositiveCos,
}

impl JunctionSign {
    fn factor(self) -> f64 {
        match self {
            JunctionSign::NegativeCos => -1.0,
            JunctionSign::PositiveCos => 1.0,
        }
    }
}

/// One weak link: spin-independent energy `e0` and spin-dependent energy
/// `e_sigma`, both as E/h in GHz.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JunctionParams {
    pub e0_ghz: f64,
    pub e_sigma_ghz: f64,
}

impl JunctionParams {
    pub fn new(e0_ghz: f64, e_sigma_ghz: f64) -> Result<Self, CircuitError> {
        if e_sigma_ghz < 0.0 {
            return Err(CircuitError::NegativeSpinEnergy(e_sigma_ghz));
        }
        Ok(Self { e0_ghz, e_sigma_ghz })
    }

    /// Combined amplitude `sqrt(e0^2 + e_sigma^2)`, GHz.
    pub fn amplitude(&self) -> f64 {
        self.e0_ghz.hypot(self.e_sigma_ghz)
    }

    /// Mixing angle `gamma = atan2(e_sigma, e0)`, in (0, pi) for e_sigma > 0.
    pub fn gamma(&self) -> f64 {
        self.e_sigma_ghz.atan2(self.e0_ghz)
    }
}

/// Series chain of N junctions with vertical and coupling inductors and one
/// external flux per loop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainCircuit {
    pub junctions: Vec<JunctionParams>,
    /// L_1..L_N, nanohenry.
    pub vertical_inductances_nh: Vec<f64>,
    /// L_{12}..L_{N-1,N}, nanohenry.
    pub coupling_inductances_nh: Vec<f64>,
    /// phi_{e,1}..phi_{e,N}, radians.
    pub external_fluxes_rad: Vec<f64>,
    #[serde(default)]
    pub junction_sign: JunctionSign,
}

impl ChainCircuit {
    pub fn new(
        junctions: Vec<JunctionParams>,
        vertical_inductances_nh: Vec<f64>,
        coupling_inductances_nh: Vec<f64>,
        external_fluxes_rad: Vec<f64>,
    ) -> Result<Self, CircuitError> {
        let n = junctions.len();
        if n == 0 {
            return Err(CircuitError::BadTopology {
                kind: "junctions",
                expected: 1,
                got: 0,
            });
        }
        if vertical_inductances_nh.len() != n {
            return Err(CircuitError::BadTopology {
                kind: "vertical inductances",
                expected: n,
                got: vertical_inductances_nh.len(),
            });
        }
        if coupling_inductances_nh.len() != n - 1 {
            return Err(CircuitError::BadTopology {
                kind: "coupling inductances",
                expected: n - 1,
                got: coupling_inductances_nh.len(),
            });
        }
        if external_fluxes_rad.len() != n {
            return Err(CircuitError::BadTopology {
                kind: "external fluxes",
                expected: n,
                got: external_fluxes_rad.len(),
            });
        }
        for j in &junctions {
            if j.e_sigma_ghz < 0.0 {
                return Err(CircuitError::NegativeSpinEnergy(j.e_sigma_ghz));
            }
        }
        for &l in vertical_inductances_nh
            .iter()
            .chain(coupling_inductances_nh.iter())
        {
            if l <= 0.0 {
                return Err(CircuitError::NonPositiveInductance(l));
            }
        }
        Ok(Self {
            junctions,
            vertical_inductances_nh,
            coupling_inductances_nh,
            external_fluxes_rad,
            junction_sign: JunctionSign::default(),
        })
    }

    /// Number of junctions (spins) in the chain.
    pub fn num_spins(&self) -> usize {
        self.junctions.len()
    }

    /// Number of free phase variables, `2N - 1`.
    pub fn num_phases(&self) -> usize {
        2 * self.num_spins() - 1
    }

    /// Vertical inductive energies E_{L,i}, GHz.
    pub fn vertical_energies_ghz(&self) -> Vec<f64> {
        self.vertical_inductances_nh
            .iter()
            .map(|&l| crate::units::inductive_energy_ghz(l))
            .collect()
    }

    /// Coupling inductive energies E_{L,(i,i+1)}, GHz.
    pub fn coupling_energies_ghz(&self) -> Vec<f64> {
        self.coupling_inductances_nh
            .iter()
            .map(|&l| crate::units::inductive_energy_ghz(l))
            .collect()
    }

    /// True iff every external flux is 0 or pi modulo 2 pi (time-reversal
    /// symmetric configuration).
    pub fn is_kramers_point(&self) -> bool {
        const TOL: f64 = 1e-9;
        self.external_fluxes_rad.iter().all(|&f| {
            let r = f.rem_euclid(std::f64::consts::PI);
            r < TOL || (std::f64::consts::PI - r) < TOL
        })
    }

    pub fn with_flux(&self, loop_index: usize, flux_rad: f64) -> Self {
        let mut c = self.clone();
        c.external_fluxes_rad[loop_index] = flux_rad;
        c
    }

    fn check_phases(&self, phases: &NodePhases) -> Result<(), CircuitError> {
        if phases.len() != self.num_phases() {
            return Err(CircuitError::DimensionMismatch {
                circuit: self.num_phases(),
                input: phases.len(),
            });
        }
        Ok(())
    }

    fn check_config(&self, config: SpinConfig) -> Result<(), CircuitError> {
        if config.num_spins() != self.num_spins() {
            return Err(CircuitError::SpinCountMismatch {
                circuit: self.num_spins(),
                config: config.num_spins(),
            });
        }
        Ok(())
    }

    /// Potential energy in GHz at the given node phases and spin configuration.
    pub fn potential(&self, phases: &NodePhases, config: SpinConfig) -> Result<f64, CircuitError> {
        self.check_phases(phases)?;
        self.check_config(config)?;
        let n = self.num_spins();
        let sign = self.junction_sign.factor();
        let ev = self.vertical_energies_ghz();
        let ec = self.coupling_energies_ghz();

        let mut energy = 0.0;
        for i in 0..n {
            let j = &self.junctions[i];
            let theta = phases.lower_chain(i) - phases.lower_chain(i + 1)
                - j.gamma() * config.spin(i);
            energy += sign * j.amplitude() * theta.cos();

            let branch =
                phases.upper_chain(i) - phases.upper_chain(i + 1) - self.external_fluxes_rad[i];
            energy += 0.5 * ev[i] * branch * branch;
        }
        for i in 0..n - 1 {
            let d = phases.upper[i] - phases.lower[i];
            energy += 0.5 * ec[i] * d * d;
        }
        Ok(energy)
    }

    /// Exact gradient of the potential with respect to the phase vector,
    /// GHz/rad, ordered `[phi_in, u_1.., d_1..]`.
    pub fn gradient(
        &self,
        phases: &NodePhases,
        config: SpinConfig,
    ) -> Result<DVector<f64>, CircuitError> {
        self.check_phases(phases)?;
        self.check_config(config)?;
        let n = self.num_spins();
        let sign = self.junction_sign.factor();
        let ev = self.vertical_energies_ghz();
        let ec = self.coupling_energies_ghz();
        let mut g = DVector::zeros(self.num_phases());

        for i in 0..n {
            let j = &self.junctions[i];
            let theta = phases.lower_chain(i) - phases.lower_chain(i + 1)
                - j.gamma() * config.spin(i);
            // d/dtheta of sign * A cos(theta) = -sign * A sin(theta)
            let dj = -sign * j.amplitude() * theta.sin();
            if let Some(k) = lower_chain_var(n, i) {
                g[k] += dj;
            }
            if let Some(k) = lower_chain_var(n, i + 1) {
                g[k] -= dj;
            }

            let branch =
                phases.upper_chain(i) - phases.upper_chain(i + 1) - self.external_fluxes_rad[i];
            let dv = ev[i] * branch;
            if let Some(k) = upper_chain_var(n, i) {
                g[k] += dv;
            }
            if let Some(k) = upper_chain_var(n, i + 1) {
                g[k] -= dv;
            }
        }
        for i in 0..n - 1 {
            let d = phases.upper[i] - phases.lower[i];
            g[1 + i] += ec[i] * d;
            g[n + i] -= ec[i] * d;
        }
        Ok(g)
    }

    /// Exact Hessian of the potential, GHz/rad^2, same variable ordering as
    /// the gradient. Symmetric by construction.
    pub fn hessian(
        &self,
        phases: &NodePhases,
        config: SpinConfig,
    ) -> Result<DMatrix<f64>, CircuitError> {
        self.check_phases(phases)?;
        self.check_config(config)?;
        let n = self.num_spins();
        let sign = self.junction_sign.factor();
        let ev = self.vertical_energies_ghz();
        let ec = self.coupling_energies_ghz();
        let dim = self.num_phases();
        let mut h = DMatrix::zeros(dim, dim);

        // Each two-terminal element contributes c * (e_a - e_b)(e_a - e_b)^T.
        let add_pair = |a: Option<usize>, b: Option<usize>, c: f64, h: &mut DMatrix<f64>| {
            if let Some(k) = a {
                h[(k, k)] += c;
            }
            if let Some(k) = b {
                h[(k, k)] += c;
            }
            if let (Some(ka), Some(kb)) = (a, b) {
                h[(ka, kb)] -= c;
                h[(kb, ka)] -= c;
            }
        };

        for i in 0..n {
            let j = &self.junctions[i];
            let theta = phases.lower_chain(i) - phases.lower_chain(i + 1)
                - j.gamma() * config.spin(i);
            let c = -sign * j.amplitude() * theta.cos();
            add_pair(lower_chain_var(n, i), lower_chain_var(n, i + 1), c, &mut h);
            add_pair(upper_chain_var(n, i), upper_chain_var(n, i + 1), ev[i], &mut h);
        }
        for i in 0..n - 1 {
            add_pair(Some(1 + i), Some(n + i), ec[i], &mut h);
        }
        Ok(h)
    }
}

/// Variable index of the i-th node of the junction chain, `None` for ground.
fn lower_chain_var(n: usize, i: usize) -> Option<usize> {
    match i {
        0 => Some(0),
        i if i < n => Some(n + i - 1),
        _ => None,
    }
}

/// Variable index of the i-th node of the vertical inductor chain.
fn upper_chain_var(n: usize, i: usize) -> Option<usize> {
    match i {
        0 => Some(0),
        i if i < n => Some(i),
        _ => None,
    }
}

/// Node phases of the chain: the input phase plus the internal upper and
/// lower nodes, `2N - 1` values in total.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodePhases {
    pub phi_in: f64,
    pub upper: Vec<f64>,
    pub lower: Vec<f64>,
}

impl NodePhases {
    pub fn zeros(num_spins: usize) -> Self {
        Self {
            phi_in: 0.0,
            upper: vec![0.0; num_spins - 1],
            lower: vec![0.0; num_spins - 1],
        }
    }

    pub fn len(&self) -> usize {
        1 + self.upper.len() + self.lower.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Phase of the i-th node along the junction chain (input, d_1.., ground).
    pub fn lower_chain(&self, i: usize) -> f64 {
        let n = self.lower.len() + 1;
        match i {
            0 => self.phi_in,
            i if i < n => self.lower[i - 1],
            _ => 0.0,
        }
    }

    /// Phase of the i-th node along the vertical inductor chain.
    pub fn upper_chain(&self, i: usize) -> f64 {
        let n = self.upper.len() + 1;
        match i {
            0 => self.phi_in,
            i if i < n => self.upper[i - 1],
            _ => 0.0,
        }
    }

    pub fn to_vector(&self) -> DVector<f64> {
        let mut v = DVector::zeros(self.len());
        v[0] = self.phi_in;
        for (i, &u) in self.upper.iter().enumerate() {
            v[1 + i] = u;
        }
        let n = self.upper.len() + 1;
        for (i, &d) in self.lower.iter().enumerate() {
            v[n + i] = d;
        }
        v
    }

    pub fn from_vector(num_spins: usize, v: &DVector<f64>) -> Self {
        let n = num_spins;
        Self {
            phi_in: v[0],
            upper: (0..n - 1).map(|i| v[1 + i]).collect(),
            lower: (0..n - 1).map(|i| v[n + i]).collect(),
        }
    }

    pub fn negated(&self) -> Self {
        Self {
            phi_in: -self.phi_in,
            upper: self.upper.iter().map(|x| -x).collect(),
            lower: self.lower.iter().map(|x| -x).collect(),
        }
    }

    /// Phase drop across junction i (not including the gamma offset).
    pub fn junction_drop(&self, i: usize) -> f64 {
        self.lower_chain(i) - self.lower_chain(i + 1)
    }
}

/// One of the 2^N classical z-spin configurations. Bit `h` of the index is
/// `(1 - sigma_h) / 2`, so index 0 is all spins up.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SpinConfig {
    num_spins: usize,
    index: usize,
}

impl SpinConfig {
    pub fn from_index(num_spins: usize, index: usize) -> Self {
        assert!(index < (1 << num_spins), "config index out of range");
        Self { num_spins, index }
    }

    pub fn from_spins(spins: &[i8]) -> Self {
        let mut index = 0;
        for (h, &s) in spins.iter().enumerate() {
            assert!(s == 1 || s == -1, "spins must be +1 or -1");
            if s == -1 {
                index |= 1 << h;
            }
        }
        Self {
            num_spins: spins.len(),
            index,
        }
    }

    pub fn all(num_spins: usize) -> impl Iterator<Item = SpinConfig> {
        (0..1usize << num_spins).map(move |index| SpinConfig { num_spins, index })
    }

    pub fn index(&self) -> usize {
        self.index
    }

    pub fn num_spins(&self) -> usize {
        self.num_spins
    }

    /// Value of sigma_h, +1.0 or -1.0, for 0-based spin h.
    pub fn spin(&self, h: usize) -> f64 {
        if self.index >> h & 1 == 0 {
            1.0
        } else {
            -1.0
        }
    }

    pub fn spins(&self) -> Vec<i8> {
        (0..self.num_spins)
            .map(|h| if self.index >> h & 1 == 0 { 1 } else { -1 })
            .collect()
    }

    /// Configuration with every spin negated.
    pub fn flip(&self) -> Self {
        Self {
            num_spins: self.num_spins,
            index: self.index ^ ((1 << self.num_spins) - 1),
        }
    }

    /// Configuration with spin h (0-based) negated.
    pub fn flip_spin(&self, h: usize) -> Self {
        Self {
            num_spins: self.num_spins,
            index: self.index ^ (1 << h),
        }
    }

    /// Product of sigma_h over the spins selected by `mask`.
    pub fn product(&self, mask: usize) -> f64 {
        if (self.index & mask).count_ones().is_multiple_of(2) {
            1.0
        } else {
            -1.0
        }
    }
}

impl std::fmt::Display for SpinConfig {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for h in 0..self.num_spins {
            write!(f, "{}", if self.spin(h) > 0.0 { '\u{2191}' } else { '\u{2193}' })?;
        }
        Ok(())
    }
}

/// Presets used across tests and the demo front ends.
pub mod presets {
    use super::*;

    /// Three-spin chain with spin energies 0.4/0.3/0.2 GHz, e0 = 0.4 GHz on
    /// every junction, uniform inductors and zero external flux.
    pub fn three_spin(l_vertical_nh: f64, l_coupling_nh: f64) -> ChainCircuit {
        ChainCircuit::new(
            vec![
                JunctionParams::new(0.4, 0.4).unwrap(),
                JunctionParams::new(0.4, 0.3).unwrap(),
                JunctionParams::new(0.4, 0.2).unwrap(),
            ],
            vec![l_vertical_nh; 3],
            vec![l_coupling_nh; 2],
            vec![0.0; 3],
        )
        .unwrap()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn paper_circuit() -> ChainCircuit {
        presets::three_spin(5.0, 5.0)
    }

    /// Central finite-difference gradient, the independent oracle for the
    /// closed-form derivatives.
    fn fd_gradient(c: &ChainCircuit, x: &NodePhases, s: SpinConfig, h: f64) -> DVector<f64> {
        let n = c.num_spins();
        let base = x.to_vector();
        let mut g = DVector::zeros(base.len());
        for k in 0..base.len() {
            let mut xp = base.clone();
            let mut xm = base.clone();
            xp[k] += h;
            xm[k] -= h;
            let vp = c
                .potential(&NodePhases::from_vector(n, &xp), s)
                .unwrap();
            let vm = c
                .potential(&NodePhases::from_vector(n, &xm), s)
                .unwrap();
            g[k] = (vp - vm) / (2.0 * h);
        }
        g
    }

    fn fd_hessian(c: &ChainCircuit, x: &NodePhases, s: SpinConfig, h: f64) -> DMatrix<f64> {
        let n = c.num_spins();
        let base = x.to_vector();
        let dim = base.len();
        let mut m = DMatrix::zeros(dim, dim);
        for k in 0..dim {
            let mut xp = base.clone();
            let mut xm = base.clone();
            xp[k] += h;
            xm[k] -= h;
            let gp = c
                .gradient(&NodePhases::from_vector(n, &xp), s)
                .unwrap();
            let gm = c
                .gradient(&NodePhases::from_vector(n, &xm), s)
                .unwrap();
            for l in 0..dim {
                m[(k, l)] = (gp[l] - gm[l]) / (2.0 * h);
            }
        }
        m
    }

    fn pseudo_random_phases(n: usize, seed: u64) -> NodePhases {
        // Small deterministic LCG; amplitudes ~0.4 rad keep the junction terms active.
        let mut state = seed.wrapping_mul(6364136223846793005).wrapping_add(1);
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64 - 0.5) * 0.8
        };
        NodePhases {
            phi_in: next(),
            upper: (0..n - 1).map(|_| next()).collect(),
            lower: (0..n - 1).map(|_| next()).collect(),
        }
    }

    #[test]
    fn zero_junctions_zero_phases_gives_zero() {
        // e_sigma must stay positive; use a vanishingly small value with e0 = 0.
        let c = ChainCircuit::new(
            vec![JunctionParams::new(0.0, 0.0).unwrap(); 3],
            vec![5.0; 3],
            vec![5.0; 2],
            vec![0.0; 3],
        )
        .unwrap();
        let x = NodePhases::zeros(3);
        let v = c.potential(&x, SpinConfig::from_index(3, 0)).unwrap();
        assert_eq!(v, 0.0);
        let g = c.gradient(&x, SpinConfig::from_index(3, 0)).unwrap();
        assert_eq!(g.amax(), 0.0);
    }

    #[test]
    fn paper_params_all_phases_zero() {
        // cos(gamma sigma) = cos(gamma) = e0 / amplitude, so every junction
        // contributes exactly -e0 at zero phases and zero flux.
        let c = paper_circuit();
        for s in SpinConfig::all(3) {
            let v = c.potential(&NodePhases::zeros(3), s).unwrap();
            assert!((v - (-1.2)).abs() < 1e-14, "V = {v} for {s}");
        }
    }

    #[test]
    fn time_reversal_symmetry_of_potential() {
        let c = paper_circuit();
        for seed in 0..20 {
            let x = pseudo_random_phases(3, seed);
            for s in SpinConfig::all(3) {
                let v1 = c.potential(&x, s).unwrap();
                let v2 = c.potential(&x.negated(), s.flip()).unwrap();
                assert!((v1 - v2).abs() < 1e-12, "V(phi,s)={v1}, V(-phi,-s)={v2}");
            }
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let c = paper_circuit();
        for seed in 0..5 {
            let x = pseudo_random_phases(3, seed);
            for s in SpinConfig::all(3) {
                let g = c.gradient(&x, s).unwrap();
                let g_fd = fd_gradient(&c, &x, s, 1e-5);
                for k in 0..g.len() {
                    let scale = g[k].abs().max(1.0);
                    assert!(
                        (g[k] - g_fd[k]).abs() / scale < 1e-6,
                        "component {k}: {} vs {}",
                        g[k],
                        g_fd[k]
                    );
                }
            }
        }
    }

    #[test]
    fn gradient_antisymmetry_under_time_reversal() {
        let c = paper_circuit();
        for seed in 0..10 {
            let x = pseudo_random_phases(3, seed);
            for s in SpinConfig::all(3) {
                let g1 = c.gradient(&x, s).unwrap();
                let g2 = c.gradient(&x.negated(), s.flip()).unwrap();
                assert!((&g1 + &g2).amax() < 1e-12);
            }
        }
    }

    #[test]
    fn hessian_matches_finite_differences_and_is_symmetric() {
        let c = paper_circuit();
        for seed in 0..3 {
            let x = pseudo_random_phases(3, seed);
            let s = SpinConfig::from_index(3, (seed % 8) as usize);
            let h = c.hessian(&x, s).unwrap();
            assert_eq!((&h - h.transpose()).amax(), 0.0, "Hessian must be exactly symmetric");
            let h_fd = fd_hessian(&c, &x, s, 1e-5);
            for k in 0..h.nrows() {
                for l in 0..h.ncols() {
                    let scale = h[(k, l)].abs().max(1.0);
                    assert!((h[(k, l)] - h_fd[(k, l)]).abs() / scale < 1e-5);
                }
            }
        }
    }

    #[test]
    fn constant_hessian_without_junction_energy() {
        let c = ChainCircuit::new(
            vec![JunctionParams::new(0.0, 0.0).unwrap(); 3],
            vec![2.0, 3.0, 4.0],
            vec![5.0, 6.0],
            vec![0.0; 3],
        )
        .unwrap();
        let s = SpinConfig::from_index(3, 5);
        let h0 = c.hessian(&NodePhases::zeros(3), s).unwrap();
        let h1 = c.hessian(&pseudo_random_phases(3, 7), s).unwrap();
        assert_eq!((&h0 - &h1).amax(), 0.0);
    }

    #[test]
    fn junction_sign_flag_flips_junction_term() {
        let mut c = paper_circuit();
        let x = pseudo_random_phases(3, 3);
        let s = SpinConfig::from_index(3, 2);
        let v_neg = c.potential(&x, s).unwrap();
        c.junction_sign = JunctionSign::PositiveCos;
        let v_pos = c.potential(&x, s).unwrap();
        // Inductive parts agree; junction parts are opposite.
        let mut bare = c.clone();
        for j in &mut bare.junctions {
            j.e_sigma_ghz = 0.0;
            j.e0_ghz = 0.0;
        }
        let v_ind = bare.potential(&x, s).unwrap();
        assert!(((v_neg - v_ind) + (v_pos - v_ind)).abs() < 1e-12);
    }

    #[test]
    fn junction_amplitude_and_gamma_invariants() {
        for &(e0, es) in &[(0.4, 0.3), (-0.4, 0.3), (0.0, 0.5), (1.0, 1e-6)] {
            let j = JunctionParams::new(e0, es).unwrap();
            assert!(j.amplitude() >= j.e_sigma_ghz);
            assert!(j.amplitude() >= j.e0_ghz.abs());
            if es > 0.0 {
                assert!(j.gamma() > 0.0 && j.gamma() < std::f64::consts::PI, "gamma {}", j.gamma());
            }
        }
        assert!(JunctionParams::new(0.4, -0.1).is_err());
    }

    #[test]
    fn spin_config_round_trip_and_flip() {
        for s in SpinConfig::all(3) {
            assert_eq!(SpinConfig::from_spins(&s.spins()), s);
            assert_eq!(s.flip().flip(), s);
            for h in 0..3 {
                assert_eq!(s.flip().spin(h), -s.spin(h));
            }
        }
        let up = SpinConfig::from_spins(&[1, 1, 1]);
        assert_eq!(up.index(), 0);
        let s = SpinConfig::from_spins(&[1, 1, -1]);
        assert_eq!(s.index(), 4);
    }

    #[test]
    fn kramers_point_detection() {
        let mut c = paper_circuit();
        assert!(c.is_kramers_point());
        c.external_fluxes_rad = vec![std::f64::consts::PI, 0.0, -std::f64::consts::PI];
        assert!(c.is_kramers_point());
        c.external_fluxes_rad = vec![0.1, 0.0, 0.0];
        assert!(!c.is_kramers_point());
        c.external_fluxes_rad = vec![2.0 * std::f64::consts::PI, 3.0 * std::f64::consts::PI, 0.0];
        assert!(c.is_kramers_point());
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let c = paper_circuit();
        let x = NodePhases::zeros(2);
        assert!(matches!(
            c.potential(&x, SpinConfig::from_index(3, 0)),
            Err(CircuitError::DimensionMismatch { .. })
        ));
        assert!(matches!(
            c.potential(&NodePhases::zeros(3), SpinConfig::from_index(2, 0)),
            Err(CircuitError::SpinCountMismatch { .. })
        ));
    }

    #[test]
    fn single_junction_chain_is_supported() {
        let c = ChainCircuit::new(
            vec![JunctionParams::new(0.4, 0.4).unwrap()],
            vec![5.0],
            vec![],
            vec![0.0],
        )
        .unwrap();
        assert_eq!(c.num_phases(), 1);
        let x = NodePhases::zeros(1);
        let v = c.potential(&x, SpinConfig::from_index(1, 0)).unwrap();
        assert!((v - (-0.4)).abs() < 1e-14);
    }
}
