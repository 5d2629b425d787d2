//! Equilibrium solver: finds the phase configuration minimizing the circuit
//! potential for each spin configuration, the ground energy, per-junction
//! phase drops and the spin-conditional inductive energy.
//!
//! The solver is a damped Newton iteration on the gradient system with a
//! backtracking line search on the gradient norm. Flux sweeps warm-start each
//! point from the previous solution.

use crate::circuit::{ChainCircuit, CircuitError, NodePhases, SpinConfig};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("Newton iteration did not converge: residual {residual:.3e} GHz/rad after {iterations} iterations")]
    NonConvergence { residual: f64, iterations: usize },
    #[error("Hessian at the root is not positive semidefinite (min eigenvalue {min_eigenvalue:.3e})")]
    SaddleDetected { min_eigenvalue: f64 },
    #[error("internal-node Hessian block is numerically singular")]
    SingularInternalBlock,
    #[error("operation requires a free-input-phase solution")]
    WrongMode,
    #[error(transparent)]
    Circuit(#[from] CircuitError),
    #[error("sweep failed for config {config_index} at point {point_index} (flux {flux_rad} rad): {source}")]
    SweepFailure {
        config_index: usize,
        point_index: usize,
        flux_rad: f64,
        #[source]
        source: Box<SolverError>,
    },
}

/// Whether the input phase relaxes with the internal nodes or is held fixed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SolveMode {
    FreeInputPhase,
    FixedInputPhase(f64),
}

#[derive(Debug, Clone)]
pub struct SolverOptions {
    /// Convergence tolerance on the gradient norm, GHz/rad.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Number of perturbed seeds tried when a saddle is detected.
    pub saddle_restarts: usize,
    /// Magnitude of the seed perturbation, rad.
    pub perturbation_rad: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-12,
            max_iterations: 200,
            saddle_restarts: 8,
            perturbation_rad: 0.3,
        }
    }
}

/// Minimizer for one spin configuration.
#[derive(Debug, Clone)]
pub struct EquilibriumSolution {
    pub config: SpinConfig,
    pub mode_phi_in: Option<f64>,
    pub phases: NodePhases,
    /// Ground energy E_g, GHz.
    pub energy_ghz: f64,
    /// Equilibrium phase drop across each junction, radians.
    pub junction_drops: Vec<f64>,
    /// Full Hessian at the minimum, input phase ordered first.
    pub hessian: DMatrix<f64>,
    /// Schur-complement inductive energy, GHz. Present in free mode.
    pub inductive_energy_ghz: Option<f64>,
    /// Final gradient norm, GHz/rad.
    pub residual: f64,
    /// Gradient norms per Newton iteration, for convergence diagnostics.
    pub residual_history: Vec<f64>,
}

impl EquilibriumSolution {
    pub fn is_free_mode(&self) -> bool {
        self.mode_phi_in.is_none()
    }
}

/// Indices of the variables the solver moves. Free mode uses all of them,
/// fixed-input mode pins index 0.
fn active_indices(dim: usize, mode: SolveMode) -> Vec<usize> {
    match mode {
        SolveMode::FreeInputPhase => (0..dim).collect(),
        SolveMode::FixedInputPhase(_) => (1..dim).collect(),
    }
}

fn select_vector(v: &DVector<f64>, idx: &[usize]) -> DVector<f64> {
    DVector::from_iterator(idx.len(), idx.iter().map(|&i| v[i]))
}

fn select_matrix(m: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(idx.len(), idx.len(), |r, c| m[(idx[r], idx[c])])
}

struct NewtonOutcome {
    x: DVector<f64>,
    residual: f64,
    history: Vec<f64>,
}

fn newton_minimize(
    circuit: &ChainCircuit,
    config: SpinConfig,
    mut x: DVector<f64>,
    active: &[usize],
    opts: &SolverOptions,
) -> Result<NewtonOutcome, SolverError> {
    let n = circuit.num_spins();
    let mut history = Vec::new();
    let grad_norm = |x: &DVector<f64>| -> Result<(f64, DVector<f64>), SolverError> {
        let g_full = circuit.gradient(&NodePhases::from_vector(n, x), config)?;
        let g = select_vector(&g_full, active);
        Ok((g.norm(), g))
    };

    let (mut r, mut g) = grad_norm(&x)?;
    history.push(r);
    for _ in 0..opts.max_iterations {
        if r < opts.tolerance {
            return Ok(NewtonOutcome { x, residual: r, history });
        }
        let h_full = circuit.hessian(&NodePhases::from_vector(n, &x), config)?;
        let mut h = select_matrix(&h_full, active);
        let mut step = h.clone().lu().solve(&(-&g));
        if step.is_none() {
            // Tikhonov fallback for a singular Hessian.
            let shift = 1e-8 * h.diagonal().amax().max(1.0);
            for k in 0..h.nrows() {
                h[(k, k)] += shift;
            }
            step = h.lu().solve(&(-&g));
        }
        let step = step.ok_or(SolverError::SingularInternalBlock)?;

        let mut t = 1.0;
        let mut accepted = None;
        while t > 1e-6 {
            let mut x_try = x.clone();
            for (k, &i) in active.iter().enumerate() {
                x_try[i] += t * step[k];
            }
            let (r_try, g_try) = grad_norm(&x_try)?;
            if r_try <= (1.0 - 1e-4 * t) * r {
                accepted = Some((x_try, r_try, g_try));
                break;
            }
            t *= 0.5;
        }
        match accepted {
            Some((x_new, r_new, g_new)) => {
                x = x_new;
                r = r_new;
                g = g_new;
                history.push(r);
            }
            None => {
                return Err(SolverError::NonConvergence {
                    residual: r,
                    iterations: history.len(),
                })
            }
        }
    }
    if r < opts.tolerance {
        Ok(NewtonOutcome { x, residual: r, history })
    } else {
        Err(SolverError::NonConvergence {
            residual: r,
            iterations: history.len(),
        })
    }
}

fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    m.clone()
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min)
}

/// Schur complement of the input-phase row of a free-mode Hessian:
/// `E_L = H00 - H0i Hii^{-1} Hi0`, GHz.
fn schur_inductive_energy(h: &DMatrix<f64>) -> Result<f64, SolverError> {
    let dim = h.nrows();
    if dim == 1 {
        return Ok(h[(0, 0)]);
    }
    let internal = h.view((1, 1), (dim - 1, dim - 1)).into_owned();
    let coupling = h.view((1, 0), (dim - 1, 1)).into_owned();
    let solved = internal
        .lu()
        .solve(&coupling)
        .ok_or(SolverError::SingularInternalBlock)?;
    Ok(h[(0, 0)] - (coupling.transpose() * solved)[(0, 0)])
}

/// Solve the equilibrium for one spin configuration, starting from zero
/// phases (or use [`solve_equilibrium_from`] to warm-start).
pub fn solve_equilibrium(
    circuit: &ChainCircuit,
    config: SpinConfig,
    mode: SolveMode,
    opts: &SolverOptions,
) -> Result<EquilibriumSolution, SolverError> {
    let mut x0 = DVector::zeros(circuit.num_phases());
    if let SolveMode::FixedInputPhase(phi) = mode {
        x0[0] = phi;
    }
    solve_equilibrium_from(circuit, config, mode, &x0, opts)
}

/// Solve the equilibrium starting from the given phase vector.
pub fn solve_equilibrium_from(
    circuit: &ChainCircuit,
    config: SpinConfig,
    mode: SolveMode,
    start: &DVector<f64>,
    opts: &SolverOptions,
) -> Result<EquilibriumSolution, SolverError> {
    let n = circuit.num_spins();
    let active = active_indices(circuit.num_phases(), mode);
    let mut x0 = start.clone();
    if let SolveMode::FixedInputPhase(phi) = mode {
        x0[0] = phi;
    }

    let mut outcome = newton_minimize(circuit, config, x0.clone(), &active, opts)?;
    let mut h_active = {
        let h = circuit.hessian(&NodePhases::from_vector(n, &outcome.x), config)?;
        select_matrix(&h, &active)
    };
    let mut lambda_min = min_eigenvalue(&h_active);
    let psd_floor = |h: &DMatrix<f64>| -1e-9 * h.diagonal().amax().max(1.0);

    if lambda_min < psd_floor(&h_active) {
        // Saddle: restart from perturbed seeds and keep the lowest-energy
        // positive-semidefinite root.
        let mut rng = ChaCha8Rng::seed_from_u64(0x15EE_D000 ^ config.index() as u64);
        let mut best: Option<(NewtonOutcome, DMatrix<f64>, f64, f64)> = None;
        for _ in 0..opts.saddle_restarts {
            let mut seed = x0.clone();
            for &i in &active {
                if rng.gen_bool(0.5) {
                    seed[i] += if rng.gen_bool(0.5) {
                        opts.perturbation_rad
                    } else {
                        -opts.perturbation_rad
                    };
                }
            }
            let Ok(candidate) = newton_minimize(circuit, config, seed, &active, opts) else {
                continue;
            };
            let h = circuit.hessian(&NodePhases::from_vector(n, &candidate.x), config)?;
            let ha = select_matrix(&h, &active);
            let lm = min_eigenvalue(&ha);
            if lm < psd_floor(&ha) {
                continue;
            }
            let e = circuit.potential(&NodePhases::from_vector(n, &candidate.x), config)?;
            if best.as_ref().is_none_or(|(_, _, _, be)| e < *be) {
                best = Some((candidate, ha, lm, e));
            }
        }
        match best {
            Some((candidate, ha, lm, _)) => {
                outcome = candidate;
                h_active = ha;
                lambda_min = lm;
            }
            None => return Err(SolverError::SaddleDetected { min_eigenvalue: lambda_min }),
        }
    }
    let _ = &h_active;
    let _ = lambda_min;

    let phases = NodePhases::from_vector(n, &outcome.x);
    let energy = circuit.potential(&phases, config)?;
    let hessian = circuit.hessian(&phases, config)?;
    let inductive = match mode {
        SolveMode::FreeInputPhase => Some(schur_inductive_energy(&hessian)?),
        SolveMode::FixedInputPhase(_) => None,
    };
    Ok(EquilibriumSolution {
        config,
        mode_phi_in: match mode {
            SolveMode::FreeInputPhase => None,
            SolveMode::FixedInputPhase(phi) => Some(phi),
        },
        junction_drops: (0..n).map(|i| phases.junction_drop(i)).collect(),
        phases,
        energy_ghz: energy,
        hessian,
        inductive_energy_ghz: inductive,
        residual: outcome.residual,
        residual_history: outcome.history,
    })
}

/// Spin-conditional inductive energy of a free-mode solution, GHz.
pub fn inductive_energy(solution: &EquilibriumSolution) -> Result<f64, SolverError> {
    if !solution.is_free_mode() {
        return Err(SolverError::WrongMode);
    }
    schur_inductive_energy(&solution.hessian)
}

/// Solve all 2^N spin configurations in free mode.
pub fn solve_all_configs(
    circuit: &ChainCircuit,
    opts: &SolverOptions,
) -> Result<Vec<EquilibriumSolution>, SolverError> {
    SpinConfig::all(circuit.num_spins())
        .map(|config| solve_equilibrium(circuit, config, SolveMode::FreeInputPhase, opts))
        .collect()
}

/// Ground-energy curves over an external-flux sweep.
#[derive(Debug, Clone)]
pub struct FluxSweep {
    pub loop_index: usize,
    pub flux_rad: Vec<f64>,
    /// Energies indexed `[config][grid point]`, GHz.
    pub energies_ghz: Vec<Vec<f64>>,
    pub configs: Vec<SpinConfig>,
    /// `(config position, grid point)` pairs where consecutive equilibria
    /// jumped by more than the continuity threshold.
    pub discontinuities: Vec<(usize, usize)>,
}

/// Sweep one external flux and record E_g per configuration, warm-starting
/// each grid point from the previous solution.
pub fn spectrum_vs_flux(
    circuit: &ChainCircuit,
    configs: &[SpinConfig],
    loop_index: usize,
    flux_grid: &[f64],
    opts: &SolverOptions,
) -> Result<FluxSweep, SolverError> {
    let mut energies = Vec::with_capacity(configs.len());
    let mut discontinuities = Vec::new();
    for (ci, &config) in configs.iter().enumerate() {
        let mut row = Vec::with_capacity(flux_grid.len());
        let mut warm: Option<DVector<f64>> = None;
        let mut prev_flux = None;
        for (pi, &flux) in flux_grid.iter().enumerate() {
            let c = circuit.with_flux(loop_index, flux);
            let sol = match warm {
                Some(ref x0) => {
                    solve_equilibrium_from(&c, config, SolveMode::FreeInputPhase, x0, opts)
                }
                None => solve_equilibrium(&c, config, SolveMode::FreeInputPhase, opts),
            }
            .map_err(|e| SolverError::SweepFailure {
                config_index: config.index(),
                point_index: pi,
                flux_rad: flux,
                source: Box::new(e),
            })?;
            let x = sol.phases.to_vector();
            if let (Some(x_prev), Some(f_prev)) = (&warm, prev_flux) {
                let step: f64 = flux - f_prev;
                let threshold = 0.5 * (step.abs() / 0.05).max(1.0);
                if (&x - x_prev).amax() > threshold {
                    discontinuities.push((ci, pi));
                }
            }
            prev_flux = Some(flux);
            warm = Some(x);
            row.push(sol.energy_ghz);
        }
        energies.push(row);
    }
    Ok(FluxSweep {
        loop_index,
        flux_rad: flux_grid.to_vec(),
        energies_ghz: energies,
        configs: configs.to_vec(),
        discontinuities,
    })
}
