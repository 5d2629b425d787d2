//! Task orchestration: runs the configured task, writes deterministic CSV
//! and JSON artifacts plus a run manifest.

use crate::config::{LineConfig, LineLength, RunConfig, SequenceKind, TaskConfig};
use isene_core::circuit::{ChainCircuit, SpinConfig};
use isene_core::dynamics::{propagate, LogicalFrame, PairCouplings, SpinHamiltonian, StateVector};
use isene_core::extract::{
    calibrated_line, extract_dispersive, extract_edsr_weights, extract_ising, scan_point,
    ExtractOptions, ReadoutSpec,
};
use isene_core::pulse::{
    gate_fidelity, krotov_optimize, krotov_seed_schedule, sequence_arbitrary_theta,
    simulate_logical_gate, three_pi_sequence, GateObjective, KrotovOptions, PulseSchedule,
};
use isene_core::qec::{
    correct_cycle, correction_pulses, overlap_up_to_frame, rz_phase, rz_phase_constant,
    rzz_phase, syndrome_of, FluxTrajectory, SyndromeModel,
};
use isene_core::resonator::{readout_table, TransmissionLine};
use isene_core::solver::{solve_all_configs, SolverOptions};
use nalgebra::DVector;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::json;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

#[derive(Debug)]
pub enum TaskError {
    Numeric(String),
    Io(std::io::Error),
}

impl std::fmt::Display for TaskError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            TaskError::Numeric(m) => write!(f, "{m}"),
            TaskError::Io(e) => write!(f, "io error: {e}"),
        }
    }
}

impl From<std::io::Error> for TaskError {
    fn from(e: std::io::Error) -> Self {
        TaskError::Io(e)
    }
}

fn numeric<E: std::fmt::Display>(e: E) -> TaskError {
    TaskError::Numeric(e.to_string())
}

pub struct RunContext {
    pub out_dir: PathBuf,
    pub seed: u64,
    pub config_hash: String,
}

/// Fixed-precision float formatting shared by every CSV writer, so that
/// reruns are byte-identical.
fn fmt(v: f64) -> String {
    if v.is_nan() {
        "nan".to_string()
    } else {
        format!("{v:.12e}")
    }
}

fn write_csv(
    path: &Path,
    header: &[String],
    rows: &[Vec<String>],
) -> Result<(), TaskError> {
    let mut out = String::new();
    out.push_str(&header.join(","));
    out.push('\n');
    for row in rows {
        out.push_str(&row.join(","));
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

fn solver_options(config: &RunConfig) -> SolverOptions {
    SolverOptions {
        tolerance: config.numerics.solver_tolerance,
        max_iterations: config.numerics.max_iterations,
        ..SolverOptions::default()
    }
}

fn extract_options(config: &RunConfig) -> ExtractOptions {
    ExtractOptions {
        solver: solver_options(config),
        require_kramers: true,
    }
}

/// Resolve the configured line into a concrete transmission line, calibrating
/// the length when requested (clamped into the search window if the target
/// is unreachable).
fn resolve_line(
    circuit: &ChainCircuit,
    line: &LineConfig,
    opts: &ExtractOptions,
) -> Result<(TransmissionLine, serde_json::Value), TaskError> {
    match line.length {
        LineLength::FixedMm(mm) => {
            let t = TransmissionLine {
                z_c_ohm: line.z_c_ohm,
                v_eff_m_per_s: line.v_eff_m_per_s,
                length_m: mm * 1e-3,
                impedance_factor: line.impedance_factor,
            };
            Ok((t, json!({"mode": "fixed", "length_mm": mm})))
        }
        LineLength::CalibrateGhz(target) => {
            let spec = ReadoutSpec {
                z_c_ohm: line.z_c_ohm,
                v_eff_m_per_s: line.v_eff_m_per_s,
                impedance_factor: line.impedance_factor,
                target_f0_ghz: target,
            };
            let (t, clamped) = calibrated_line(circuit, &spec, opts).map_err(numeric)?;
            let echo = json!({
                "mode": "calibrated",
                "target_f0_GHz": target,
                "length_mm": t.length_m * 1e3,
                "clamped": clamped,
            });
            Ok((t, echo))
        }
    }
}

/// Extract the effective model (pair couplings + EDSR weights) used by the
/// dynamics, optimization and QEC tasks.
fn effective_model(config: &RunConfig) -> Result<(PairCouplings, Vec<Vec<f64>>), TaskError> {
    let opts = extract_options(config);
    let ising = extract_ising(&config.circuit, &opts).map_err(numeric)?;
    let weights = extract_edsr_weights(&config.circuit, &opts).map_err(numeric)?;
    Ok((ising.pairs_ghz(), weights.matrix))
}

/// Run the configured task; returns the artifact file names for the manifest.
pub fn run(config: &RunConfig, ctx: &RunContext) -> Result<Vec<String>, TaskError> {
    fs::create_dir_all(&ctx.out_dir)?;
    let started = Instant::now();
    let mut line_echo = serde_json::Value::Null;
    let outputs = match &config.task {
        TaskConfig::Solve => task_solve(config, ctx, &mut line_echo)?,
        TaskConfig::Extract => task_extract(config, ctx, &mut line_echo)?,
        TaskConfig::Check => task_check(config, ctx, &mut line_echo)?,
        TaskConfig::Spectrum { .. } => task_spectrum(config, ctx)?,
        TaskConfig::Scan { .. } => task_scan(config, ctx)?,
        TaskConfig::Dynamics { .. } => task_dynamics(config, ctx)?,
        TaskConfig::Optimize { .. } => task_optimize(config, ctx)?,
        TaskConfig::Gates { .. } => task_gates(config, ctx)?,
        TaskConfig::Qec { .. } => task_qec(config, ctx, &mut line_echo)?,
    };

    let manifest = json!({
        "task": config.task.kind(),
        "config_hash_sha256": ctx.config_hash,
        "version": env!("CARGO_PKG_VERSION"),
        "tolerances": {
            "solver_tolerance_GHz_per_rad": config.numerics.solver_tolerance,
            "max_iterations": config.numerics.max_iterations,
            "kappa_MHz": config.numerics.kappa_mhz,
        },
        "seed": ctx.seed,
        "line": line_echo,
        "wall_time_ms": started.elapsed().as_millis() as u64,
        "outputs": outputs,
    });
    fs::write(
        ctx.out_dir.join("run_manifest.json"),
        serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n",
    )?;
    Ok(outputs)
}

fn task_solve(
    config: &RunConfig,
    ctx: &RunContext,
    line_echo: &mut serde_json::Value,
) -> Result<Vec<String>, TaskError> {
    let opts = solver_options(config);
    let n = config.circuit.num_spins();
    let solutions = solve_all_configs(&config.circuit, &opts).map_err(numeric)?;

    let mut header: Vec<String> = vec!["config_index".into()];
    header.extend((1..=n).map(|h| format!("sigma_{h}")));
    header.push("phi_in_star".into());
    header.push("E_g_GHz".into());
    header.push("E_L_GHz".into());
    header.extend((1..=n).map(|j| format!("drop_{j}")));

    let rows: Vec<Vec<String>> = solutions
        .iter()
        .map(|sol| {
            let mut row = vec![sol.config.index().to_string()];
            row.extend(sol.config.spins().iter().map(|s| s.to_string()));
            row.push(fmt(sol.phases.phi_in));
            row.push(fmt(sol.energy_ghz));
            row.push(fmt(sol.inductive_energy_ghz.unwrap_or(f64::NAN)));
            row.extend(sol.junction_drops.iter().map(|&d| fmt(d)));
            row
        })
        .collect();
    write_csv(&ctx.out_dir.join("equilibrium.csv"), &header, &rows)?;
    let mut outputs = vec!["equilibrium.csv".to_string()];

    if let Some(line) = &config.line {
        let eopts = extract_options(config);
        let (t, echo) = resolve_line(&config.circuit, line, &eopts)?;
        *line_echo = echo;
        let table = readout_table(&config.circuit, &t, &opts).map_err(numeric)?;
        let header = vec![
            "config_index".to_string(),
            "E_L_GHz".to_string(),
            "f_r_GHz".to_string(),
        ];
        let rows: Vec<Vec<String>> = (0..table.frequencies_ghz.len())
            .map(|i| {
                vec![
                    i.to_string(),
                    fmt(table.inductive_energies_ghz[i]),
                    fmt(table.frequencies_ghz[i]),
                ]
            })
            .collect();
        write_csv(&ctx.out_dir.join("readout.csv"), &header, &rows)?;
        outputs.push("readout.csv".to_string());
    }
    Ok(outputs)
}

/// Snap coefficients below 1e-9 MHz to exact zero for human-facing summaries.
fn snap_mhz(value_mhz: f64) -> f64 {
    if value_mhz.abs() < 1e-9 {
        0.0
    } else {
        value_mhz
    }
}

fn task_extract(
    config: &RunConfig,
    ctx: &RunContext,
    line_echo: &mut serde_json::Value,
) -> Result<Vec<String>, TaskError> {
    let opts = extract_options(config);
    let ising = extract_ising(&config.circuit, &opts).map_err(numeric)?;
    let weights = extract_edsr_weights(&config.circuit, &opts).map_err(numeric)?;

    let pair_obj = |pairs: Vec<((usize, usize), f64)>, scale: f64| {
        let mut m = serde_json::Map::new();
        for ((h, j), v) in pairs {
            m.insert(format!("{}{}", h + 1, j + 1), json!(snap_mhz(v * scale)));
        }
        serde_json::Value::Object(m)
    };

    let mut summary = json!({
        "J_MHz": pair_obj(ising.pairs_ghz(), 1e3),
        "J0_GHz": ising.j0_ghz(),
        "kramers": {
            "is_kramers_point": config.circuit.is_kramers_point(),
            "max_odd_J_MHz": ising.max_abs_odd_mhz(),
        },
        "edsr_A": weights.matrix,
        "A_offdiagonal_max": weights.max_abs_offdiagonal(),
        "edsr_truncation_residual_rad": weights.truncation_residual_rad,
        "raw": {
            "walsh_E_g_GHz": (0..1usize << config.circuit.num_spins())
                .map(|m| ising.walsh.get(m))
                .collect::<Vec<_>>(),
            "energies_GHz": ising.energies_ghz,
        },
    });

    if let Some(line) = &config.line {
        let (t, echo) = resolve_line(&config.circuit, line, &opts)?;
        *line_echo = echo;
        let dispersive = extract_dispersive(&config.circuit, &t, &opts).map_err(numeric)?;
        summary["chi_MHz"] = pair_obj(dispersive.pairs_ghz(), 1e3);
        summary["f_r0_GHz"] = json!(dispersive.f_r0_ghz());
        summary["kramers"]["max_odd_chi_MHz"] = json!(dispersive.max_abs_odd_mhz());
        summary["raw"]["walsh_f_r_GHz"] = json!((0..1usize << config.circuit.num_spins())
            .map(|m| dispersive.walsh.get(m))
            .collect::<Vec<_>>());
    }

    fs::write(
        ctx.out_dir.join("summary.json"),
        serde_json::to_string_pretty(&summary).expect("summary serializes") + "\n",
    )?;
    Ok(vec!["summary.json".to_string()])
}

fn task_check(
    config: &RunConfig,
    ctx: &RunContext,
    line_echo: &mut serde_json::Value,
) -> Result<Vec<String>, TaskError> {
    let opts = extract_options(config);
    let is_kramers = config.circuit.is_kramers_point();
    let mut report = json!({ "is_kramers_point": is_kramers });
    let mut pass = is_kramers;
    let null_tolerance_mhz = 1e-6;

    if is_kramers {
        let ising = extract_ising(&config.circuit, &opts).map_err(numeric)?;
        let max_odd_j = ising.max_abs_odd_mhz();
        let mut degeneracy: f64 = 0.0;
        for config_idx in SpinConfig::all(config.circuit.num_spins()) {
            let e1 = ising.energies_ghz[config_idx.index()];
            let e2 = ising.energies_ghz[config_idx.flip().index()];
            degeneracy = degeneracy.max((e1 - e2).abs());
        }
        report["max_odd_J_MHz"] = json!(max_odd_j);
        report["max_degeneracy_split_GHz"] = json!(degeneracy);
        pass &= max_odd_j < null_tolerance_mhz && degeneracy < 1e-9;

        if let Some(line) = &config.line {
            let (t, echo) = resolve_line(&config.circuit, line, &opts)?;
            *line_echo = echo;
            let dispersive = extract_dispersive(&config.circuit, &t, &opts).map_err(numeric)?;
            let max_odd_chi = dispersive.max_abs_odd_mhz();
            report["max_odd_chi_MHz"] = json!(max_odd_chi);
            pass &= max_odd_chi < null_tolerance_mhz;
        }
    }
    report["null_tolerance_MHz"] = json!(null_tolerance_mhz);
    report["pass"] = json!(pass);
    fs::write(
        ctx.out_dir.join("check.json"),
        serde_json::to_string_pretty(&report).expect("report serializes") + "\n",
    )?;
    if !pass {
        return Err(TaskError::Numeric(
            "Kramers check failed (see check.json)".into(),
        ));
    }
    Ok(vec!["check.json".to_string()])
}

fn task_spectrum(config: &RunConfig, ctx: &RunContext) -> Result<Vec<String>, TaskError> {
    let TaskConfig::Spectrum {
        flux_loop,
        flux_min_rad,
        flux_max_rad,
        points,
    } = &config.task
    else {
        unreachable!()
    };
    let opts = solver_options(config);
    let n = config.circuit.num_spins();
    let configs: Vec<SpinConfig> = SpinConfig::all(n).collect();
    let grid: Vec<f64> = (0..*points)
        .map(|i| flux_min_rad + (flux_max_rad - flux_min_rad) * i as f64 / (*points - 1) as f64)
        .collect();
    let sweep =
        isene_core::solver::spectrum_vs_flux(&config.circuit, &configs, *flux_loop, &grid, &opts)
            .map_err(numeric)?;

    let mut header = vec!["flux_rad".to_string()];
    header.extend((0..configs.len()).map(|i| format!("E_g_{i}_GHz")));
    let rows: Vec<Vec<String>> = grid
        .iter()
        .enumerate()
        .map(|(pi, &f)| {
            let mut row = vec![fmt(f)];
            row.extend((0..configs.len()).map(|ci| fmt(sweep.energies_ghz[ci][pi])));
            row
        })
        .collect();
    write_csv(&ctx.out_dir.join("spectrum.csv"), &header, &rows)?;
    Ok(vec!["spectrum.csv".to_string()])
}

fn task_scan(config: &RunConfig, ctx: &RunContext) -> Result<Vec<String>, TaskError> {
    let TaskConfig::Scan {
        l_vertical_nh,
        l_coupling_nh,
        with_readout,
    } = &config.task
    else {
        unreachable!()
    };
    let opts = extract_options(config);
    let readout_spec = if *with_readout {
        let line = config
            .line
            .as_ref()
            .ok_or_else(|| TaskError::Numeric("scan with readout needs a line block".into()))?;
        let target = match line.length {
            LineLength::CalibrateGhz(f) => f,
            LineLength::FixedMm(_) => {
                return Err(TaskError::Numeric(
                    "scan readout requires calibrate_f0_GHz (the length is recalibrated per grid point)"
                        .into(),
                ))
            }
        };
        Some(ReadoutSpec {
            z_c_ohm: line.z_c_ohm,
            v_eff_m_per_s: line.v_eff_m_per_s,
            impedance_factor: line.impedance_factor,
            target_f0_ghz: target,
        })
    } else {
        None
    };

    let lv = l_vertical_nh.values();
    let lc = l_coupling_nh.values();
    let grid: Vec<(f64, f64)> = lv
        .iter()
        .flat_map(|&a| lc.iter().map(move |&b| (a, b)))
        .collect();
    let points: Vec<_> = grid
        .par_iter()
        .map(|&(a, b)| scan_point(&config.circuit, a, b, readout_spec.as_ref(), &opts))
        .collect();

    let mut header = vec!["L_vertical_nH".to_string(), "L_coupling_nH".to_string()];
    for (h, j) in [(1, 2), (2, 3), (1, 3)] {
        header.push(format!("J{h}{j}_MHz"));
    }
    for (h, j) in [(1, 2), (2, 3), (1, 3)] {
        header.push(format!("chi{h}{j}_MHz"));
    }
    header.push("f_r0_GHz".into());
    header.push("length_mm".into());
    header.push("length_clamped".into());
    header.push("A_offdiagonal_max".into());
    header.push("error".into());

    let pair_value = |pairs: &[((usize, usize), f64)], h: usize, j: usize| -> f64 {
        pairs
            .iter()
            .find(|&&((a, b), _)| (a, b) == (h, j))
            .map(|&(_, v)| v)
            .unwrap_or(f64::NAN)
    };
    let rows: Vec<Vec<String>> = points
        .iter()
        .map(|p| {
            let mut row = vec![fmt(p.l_vertical_nh), fmt(p.l_coupling_nh)];
            for (h, j) in [(0usize, 1usize), (1, 2), (0, 2)] {
                row.push(fmt(pair_value(&p.j_pairs_mhz, h, j)));
            }
            for (h, j) in [(0usize, 1usize), (1, 2), (0, 2)] {
                let v = p
                    .chi_pairs_mhz
                    .as_ref()
                    .map(|c| pair_value(c, h, j))
                    .unwrap_or(f64::NAN);
                row.push(fmt(v));
            }
            row.push(fmt(p.f_r0_ghz.unwrap_or(f64::NAN)));
            row.push(fmt(p.length_m.map(|l| l * 1e3).unwrap_or(f64::NAN)));
            row.push((p.length_clamped as u8).to_string());
            row.push(fmt(p.a_offdiagonal_max));
            row.push(p.error.clone().unwrap_or_default());
            row
        })
        .collect();
    write_csv(&ctx.out_dir.join("scan.csv"), &header, &rows)?;
    Ok(vec!["scan.csv".to_string()])
}

/// Write a propagated trajectory with logical decomposition columns.
fn write_trajectory(
    path: &Path,
    h: &SpinHamiltonian,
    schedule: &PulseSchedule,
    psi0: &StateVector,
) -> Result<(f64, f64), TaskError> {
    let dt = 0.8 * schedule.max_propagation_dt(h);
    let traj = propagate(h, &schedule.channels, schedule.t_total_ns, dt, psi0).map_err(numeric)?;
    let frame = LogicalFrame::new(h.num_spins);
    let dim = h.dim();

    let mut header = vec!["t_ns".to_string()];
    for i in 0..dim {
        header.push(format!("re_{i}"));
        header.push(format!("im_{i}"));
    }
    header.push("W".into());
    header.push("alpha_plus".into());
    header.push("alpha_minus".into());
    header.push("theta_rel_rad".into());

    let mut rows = Vec::with_capacity(traj.times_ns.len());
    let mut final_w = 0.0;
    let mut final_theta = 0.0;
    for (t, state) in traj.times_ns.iter().zip(&traj.states) {
        let d = frame.decompose(state);
        let mut row = vec![fmt(*t)];
        for i in 0..dim {
            row.push(fmt(state.amplitudes[i].re));
            row.push(fmt(state.amplitudes[i].im));
        }
        row.push(fmt(d.weight));
        row.push(fmt(d.alpha_plus));
        row.push(fmt(d.alpha_minus));
        row.push(fmt(d.relative_angle()));
        rows.push(row);
        final_w = d.weight;
        final_theta = d.relative_angle();
    }
    write_csv(path, &header, &rows)?;
    Ok((final_w, final_theta))
}

fn task_dynamics(config: &RunConfig, ctx: &RunContext) -> Result<Vec<String>, TaskError> {
    let TaskConfig::Dynamics {
        sequence,
        theta_rad,
        rabi_divisor,
    } = &config.task
    else {
        unreachable!()
    };
    let (pairs, weights) = effective_model(config)?;
    let h = SpinHamiltonian::from_pairs(3, &pairs);
    let min_carrier = min_hop_frequency(&h);
    let rabi = min_carrier / rabi_divisor;
    let (schedule, chain, target_theta) = match sequence {
        SequenceKind::ThreePi => {
            let (s, c) = three_pi_sequence(&pairs, &weights, rabi).map_err(numeric)?;
            (s, c, std::f64::consts::PI)
        }
        SequenceKind::ArbitraryTheta => {
            let (s, c) =
                sequence_arbitrary_theta(&pairs, &weights, rabi, *theta_rad).map_err(numeric)?;
            (s, c, *theta_rad)
        }
    };

    let psi0 = StateVector::basis(3, 0); // logical |0>
    let (final_w, final_theta) =
        write_trajectory(&ctx.out_dir.join("trajectory.csv"), &h, &schedule, &psi0)?;

    let sim = simulate_logical_gate(&h, &schedule, 0.8 * schedule.max_propagation_dt(&h))
        .map_err(numeric)?;
    let objective = GateObjective::rx(LogicalFrame::new(3), target_theta);
    let report = json!({
        "sequence": match sequence { SequenceKind::ThreePi => "three_pi", SequenceKind::ArbitraryTheta => "arbitrary_theta" },
        "target_theta_rad": target_theta,
        "rabi_rate_GHz": rabi,
        "J_pairs_GHz": pairs.iter().map(|((h, j), v)| json!({"pair": [h + 1, j + 1], "value": v})).collect::<Vec<_>>(),
        "transition_chain": chain.hops,
        "gate_fidelity": gate_fidelity(&sim.matrix, &objective),
        "final_logical_weight": final_w,
        "final_relative_angle_rad": final_theta,
        "t_total_ns": schedule.t_total_ns,
    });
    fs::write(
        ctx.out_dir.join("dynamics.json"),
        serde_json::to_string_pretty(&report).expect("report serializes") + "\n",
    )?;
    Ok(vec!["trajectory.csv".to_string(), "dynamics.json".to_string()])
}

fn min_hop_frequency(h: &SpinHamiltonian) -> f64 {
    // Smallest carrier used by the sequential constructions.
    [(0usize, 1usize), (1, 3), (3, 0)]
        .iter()
        .map(|&(a, b)| (h.diagonal_ghz[b] - h.diagonal_ghz[a]).abs())
        .fold(f64::INFINITY, f64::min)
}

fn task_optimize(config: &RunConfig, ctx: &RunContext) -> Result<Vec<String>, TaskError> {
    let TaskConfig::Optimize {
        theta_rad,
        t_total_us,
        steps,
        iterations,
        lambda_a,
    } = &config.task
    else {
        unreachable!()
    };
    let (pairs, weights) = effective_model(config)?;
    let h = SpinHamiltonian::from_pairs(3, &pairs);
    let t_total = t_total_us * 1e3;
    let initial =
        krotov_seed_schedule(&pairs, &weights, *theta_rad, t_total, *steps).map_err(numeric)?;
    let objective = GateObjective::rx(LogicalFrame::new(3), *theta_rad);
    let opts = KrotovOptions {
        lambda_a: *lambda_a,
        iterations: *iterations,
        target_infidelity: None,
        ..KrotovOptions::default()
    };
    let result = krotov_optimize(&h, &objective, &initial, &opts).map_err(numeric)?;

    // Per-spin total envelopes on the schedule grid.
    let schedule = &result.schedule;
    let dt = schedule.dt_ns();
    let mut header = vec!["t_ns".to_string()];
    header.extend((1..=3).map(|j| format!("M{j}_GHz")));
    let rows: Vec<Vec<String>> = (0..schedule.steps)
        .map(|i| {
            let t = (i as f64 + 0.5) * dt;
            let mut row = vec![fmt(t)];
            for spin in 0..3 {
                let m: f64 = schedule
                    .channels
                    .iter()
                    .filter(|c| c.spin == spin)
                    .map(|c| c.envelope_ghz[i])
                    .sum();
                row.push(fmt(m));
            }
            row
        })
        .collect();
    write_csv(&ctx.out_dir.join("pulses.csv"), &header, &rows)?;

    let sim = simulate_logical_gate(&h, schedule, schedule.dt_ns()).map_err(numeric)?;
    let fidelity = gate_fidelity(&sim.matrix, &objective);
    let psi0 = StateVector::basis(3, 0);
    let (final_w, final_theta) =
        write_trajectory(&ctx.out_dir.join("trajectory.csv"), &h, schedule, &psi0)?;

    let manifest = json!({
        "theta_rad": theta_rad,
        "t_total_ns": t_total,
        "steps": steps,
        "iterations": iterations,
        "lambda_a": lambda_a,
        "carriers": schedule.channels.iter().map(|c| json!({
            "spin": c.spin + 1,
            "tones_GHz": c.carriers.iter().map(|t| t.frequency_ghz).collect::<Vec<_>>(),
            "phases_rad": c.carriers.iter().map(|t| t.phase_rad).collect::<Vec<_>>(),
        })).collect::<Vec<_>>(),
        "fidelity_trace": result.fidelity_trace,
        "final_fidelity": fidelity,
        "final_infidelity": 1.0 - fidelity,
        "final_logical_weight": final_w,
        "final_relative_angle_rad": final_theta,
    });
    fs::write(
        ctx.out_dir.join("krotov.json"),
        serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n",
    )?;
    Ok(vec![
        "pulses.csv".to_string(),
        "trajectory.csv".to_string(),
        "krotov.json".to_string(),
    ])
}

fn task_gates(config: &RunConfig, ctx: &RunContext) -> Result<Vec<String>, TaskError> {
    let TaskConfig::Gates { rz, rzz } = &config.task else {
        unreachable!()
    };
    let opts = solver_options(config);
    let mut report = serde_json::Map::new();

    if let Some(spec) = rz {
        let traj = FluxTrajectory::rect(spec.flux_loop, spec.flux_rad, spec.duration_ns, spec.samples);
        let quad = rz_phase(&config.circuit, &traj, &opts).map_err(numeric)?;
        let closed =
            rz_phase_constant(&config.circuit, spec.flux_loop, spec.flux_rad, spec.duration_ns, &opts)
                .map_err(numeric)?;
        report.insert(
            "rz".into(),
            json!({
                "flux_loop": spec.flux_loop,
                "flux_rad": spec.flux_rad,
                "duration_ns": spec.duration_ns,
                "theta_rad": quad.theta_rad,
                "theta_mod_rad": quad.theta_mod_rad,
                "closed_form_theta_rad": closed,
            }),
        );
    }
    if let Some(spec) = rzz {
        let (pairs, _) = effective_model(config)?;
        let intra_min = pairs
            .iter()
            .map(|&(_, v)| v.abs())
            .fold(f64::INFINITY, f64::min);
        let samples = vec![spec.j_inter_ghz; 101];
        let out = rzz_phase(&samples, spec.duration_ns, Some(intra_min)).map_err(numeric)?;
        report.insert(
            "rzz".into(),
            json!({
                "j_inter_GHz": spec.j_inter_ghz,
                "duration_ns": spec.duration_ns,
                "theta_rad": out.theta_rad,
                "weak_coupling_warning": out.weak_coupling_warning,
            }),
        );
    }
    fs::write(
        ctx.out_dir.join("gates.json"),
        serde_json::to_string_pretty(&serde_json::Value::Object(report)).expect("serializes") + "\n",
    )?;
    Ok(vec!["gates.json".to_string()])
}

fn task_qec(
    config: &RunConfig,
    ctx: &RunContext,
    line_echo: &mut serde_json::Value,
) -> Result<Vec<String>, TaskError> {
    let TaskConfig::Qec {
        superpositions,
        rabi_divisor,
    } = &config.task
    else {
        unreachable!()
    };
    let line = config
        .line
        .as_ref()
        .ok_or_else(|| TaskError::Numeric("qec task needs a line block".into()))?;
    let opts = extract_options(config);
    let (t, echo) = resolve_line(&config.circuit, line, &opts)?;
    *line_echo = echo;

    let table = readout_table(&config.circuit, &t, &opts.solver).map_err(numeric)?;
    let model =
        SyndromeModel::from_readout(&table, config.numerics.kappa_mhz * 1e-3).map_err(numeric)?;

    // Exhaustive classification closure over all configurations.
    let mut closure_ok = true;
    for c in SpinConfig::all(3) {
        let classified = model
            .classify(table.frequencies_ghz[c.index()])
            .map_err(numeric)?;
        closure_ok &= classified == syndrome_of(c);
    }

    let (pairs, weights) = effective_model(config)?;
    let h = SpinHamiltonian::from_pairs(3, &pairs);
    let pulses = correction_pulses(&pairs, &weights, *rabi_divisor).map_err(numeric)?;

    let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed);
    let mut cases: Vec<(usize, Complex64, Complex64)> = Vec::new();
    for spin in 0..3 {
        cases.push((spin, Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)));
    }
    for _ in 0..*superpositions {
        let (alpha, beta) = loop {
            let alpha = Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5);
            let beta = Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5);
            if alpha.norm_sqr() + beta.norm_sqr() > 0.05 {
                break (alpha, beta);
            }
        };
        for spin in 0..3 {
            cases.push((spin, alpha, beta));
        }
    }

    let reports: Vec<serde_json::Value> = cases
        .par_iter()
        .map(|&(spin, alpha, beta)| {
            let norm = (alpha.norm_sqr() + beta.norm_sqr()).sqrt();
            let mut amps = DVector::from_element(8, Complex64::new(0.0, 0.0));
            amps[0] = alpha / norm;
            amps[7] = beta / norm;
            let original = StateVector::from_amplitudes(amps);
            let mut flipped = DVector::from_element(8, Complex64::new(0.0, 0.0));
            for i in 0..8 {
                flipped[i ^ (1 << spin)] = original.amplitudes[i];
            }
            let errored = StateVector::from_amplitudes(flipped);
            match correct_cycle(&errored, &h, &model, &pulses) {
                Ok((corrected, report)) => {
                    let overlap = overlap_up_to_frame(&original, &corrected, &report);
                    json!({
                        "injected_error": format!("X{}", spin + 1),
                        "alpha": [alpha.re / norm, alpha.im / norm],
                        "beta": [beta.re / norm, beta.im / norm],
                        "measured_syndrome": report.measured_syndrome,
                        "correction_spin": report.correction_spin.map(|s| s + 1),
                        "final_W": report.final_weight,
                        "pauli_frame_z": report.pauli_frame_z,
                        "fidelity": overlap,
                    })
                }
                Err(e) => json!({
                    "injected_error": format!("X{}", spin + 1),
                    "error": e.to_string(),
                }),
            }
        })
        .collect();

    let out = json!({
        "classification_closure": closure_ok,
        "kappa_MHz": config.numerics.kappa_mhz,
        "class_frequencies_GHz": model.classes.iter().map(|(s, f)| json!({"syndrome": s, "f_GHz": f})).collect::<Vec<_>>(),
        "cycles": reports,
    });
    fs::write(
        ctx.out_dir.join("qec.json"),
        serde_json::to_string_pretty(&out).expect("serializes") + "\n",
    )?;
    Ok(vec!["qec.json".to_string()])
}
