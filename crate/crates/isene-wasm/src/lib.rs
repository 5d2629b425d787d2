//! Browser bindings for the spin-chain workbench: three interactive
//! operations over JSON strings (flux dispersion, coupling extraction and a
//! logical-gate simulation), compiled to WebAssembly for the static demo
//! page in `www/`.
//!
//! The JSON-in/JSON-out surface keeps the bindings trivially testable on the
//! host target as well.

use isene_core::circuit::{presets, SpinConfig};
use isene_core::dynamics::{propagate, LogicalFrame, SpinHamiltonian, StateVector};
use isene_core::extract::{
    calibrated_line, extract_dispersive, extract_edsr_weights, extract_ising, ExtractOptions,
    ReadoutSpec,
};
use isene_core::pulse::{
    gate_fidelity, sequence_arbitrary_theta, simulate_logical_gate, three_pi_sequence,
    GateObjective,
};
use isene_core::solver::spectrum_vs_flux;
use isene_core::units::SPEED_OF_LIGHT;
use serde::Deserialize;
use serde_json::json;
use wasm_bindgen::prelude::*;

#[derive(Deserialize)]
struct SpectrumParams {
    l_vertical_nh: f64,
    l_coupling_nh: f64,
    #[serde(default)]
    flux_loop: usize,
    #[serde(default = "default_points")]
    points: usize,
}

fn default_points() -> usize {
    61
}

#[derive(Deserialize)]
struct CouplingParams {
    l_vertical_nh: f64,
    l_coupling_nh: f64,
    #[serde(default = "default_f0")]
    target_f0_ghz: f64,
}

fn default_f0() -> f64 {
    9.0
}

#[derive(Deserialize)]
struct GateParams {
    l_vertical_nh: f64,
    l_coupling_nh: f64,
    #[serde(default)]
    sequence: String,
    #[serde(default = "default_theta")]
    theta_rad: f64,
    #[serde(default = "default_divisor")]
    rabi_divisor: f64,
}

fn default_theta() -> f64 {
    std::f64::consts::PI
}

fn default_divisor() -> f64 {
    100.0
}

fn check_inductances(lv: f64, lc: f64) -> Result<(), String> {
    if !(0.05..=100.0).contains(&lv) || !(0.05..=100.0).contains(&lc) {
        return Err(format!("inductances out of range: {lv}, {lc} nH"));
    }
    Ok(())
}

fn spectrum_impl(params: &str) -> Result<serde_json::Value, String> {
    let p: SpectrumParams = serde_json::from_str(params).map_err(|e| e.to_string())?;
    check_inductances(p.l_vertical_nh, p.l_coupling_nh)?;
    if p.flux_loop > 2 {
        return Err("flux_loop must be 0..2".into());
    }
    let points = p.points.clamp(11, 201);
    let circuit = presets::three_spin(p.l_vertical_nh, p.l_coupling_nh);
    let configs: Vec<SpinConfig> = SpinConfig::all(3).collect();
    let grid: Vec<f64> = (0..points)
        .map(|i| -std::f64::consts::PI + std::f64::consts::TAU * i as f64 / (points - 1) as f64)
        .collect();
    let sweep = spectrum_vs_flux(
        &circuit,
        &configs,
        p.flux_loop,
        &grid,
        &Default::default(),
    )
    .map_err(|e| e.to_string())?;
    Ok(json!({
        "flux_rad": sweep.flux_rad,
        "energies_GHz": sweep.energies_ghz,
        "labels": configs.iter().map(|c| c.to_string()).collect::<Vec<_>>(),
    }))
}

fn coupling_impl(params: &str) -> Result<serde_json::Value, String> {
    let p: CouplingParams = serde_json::from_str(params).map_err(|e| e.to_string())?;
    check_inductances(p.l_vertical_nh, p.l_coupling_nh)?;
    let circuit = presets::three_spin(p.l_vertical_nh, p.l_coupling_nh);
    let opts = ExtractOptions::default();
    let ising = extract_ising(&circuit, &opts).map_err(|e| e.to_string())?;
    let weights = extract_edsr_weights(&circuit, &opts).map_err(|e| e.to_string())?;
    let spec = ReadoutSpec {
        z_c_ohm: 50.0,
        v_eff_m_per_s: 0.39 * SPEED_OF_LIGHT,
        impedance_factor: 2.0,
        target_f0_ghz: p.target_f0_ghz,
    };
    let (line, clamped) = calibrated_line(&circuit, &spec, &opts).map_err(|e| e.to_string())?;
    let dispersive = extract_dispersive(&circuit, &line, &opts).map_err(|e| e.to_string())?;
    let pair_map = |pairs: Vec<((usize, usize), f64)>| {
        let mut m = serde_json::Map::new();
        for ((h, j), v) in pairs {
            m.insert(format!("{}{}", h + 1, j + 1), json!(v * 1e3));
        }
        serde_json::Value::Object(m)
    };
    Ok(json!({
        "J_MHz": pair_map(ising.pairs_ghz()),
        "chi_MHz": pair_map(dispersive.pairs_ghz()),
        "f_r0_GHz": dispersive.f_r0_ghz(),
        "length_mm": line.length_m * 1e3,
        "length_clamped": clamped,
        "A": weights.matrix,
        "A_offdiagonal_max": weights.max_abs_offdiagonal(),
        "max_odd_J_MHz": ising.max_abs_odd_mhz(),
    }))
}

fn gate_impl(params: &str) -> Result<serde_json::Value, String> {
    let p: GateParams = serde_json::from_str(params).map_err(|e| e.to_string())?;
    check_inductances(p.l_vertical_nh, p.l_coupling_nh)?;
    let divisor = p.rabi_divisor.clamp(60.0, 400.0);
    let circuit = presets::three_spin(p.l_vertical_nh, p.l_coupling_nh);
    let opts = ExtractOptions::default();
    let ising = extract_ising(&circuit, &opts).map_err(|e| e.to_string())?;
    let weights = extract_edsr_weights(&circuit, &opts).map_err(|e| e.to_string())?;
    let pairs = ising.pairs_ghz();
    let h = SpinHamiltonian::from_pairs(3, &pairs);

    let min_carrier = [(0usize, 1usize), (1, 3), (3, 0)]
        .iter()
        .map(|&(a, b)| (h.diagonal_ghz[b] - h.diagonal_ghz[a]).abs())
        .fold(f64::INFINITY, f64::min);
    let rabi = min_carrier / divisor;
    let (schedule, target_theta) = match p.sequence.as_str() {
        "arbitrary_theta" => (
            sequence_arbitrary_theta(&pairs, &weights.matrix, rabi, p.theta_rad)
                .map_err(|e| e.to_string())?
                .0,
            p.theta_rad,
        ),
        _ => (
            three_pi_sequence(&pairs, &weights.matrix, rabi)
                .map_err(|e| e.to_string())?
                .0,
            std::f64::consts::PI,
        ),
    };

    let dt = 0.8 * schedule.max_propagation_dt(&h);
    let frame = LogicalFrame::new(3);
    let traj = propagate(
        &h,
        &schedule.channels,
        schedule.t_total_ns,
        dt,
        &StateVector::basis(3, 0),
    )
    .map_err(|e| e.to_string())?;

    // Thin the trajectory for plotting.
    let stride = (traj.times_ns.len() / 600).max(1);
    let mut t_ns = Vec::new();
    let mut w = Vec::new();
    let mut theta_rel = Vec::new();
    let mut pair_populations: Vec<Vec<f64>> = vec![Vec::new(); 4];
    for (i, (t, s)) in traj.times_ns.iter().zip(&traj.states).enumerate() {
        if i % stride != 0 && i + 1 != traj.times_ns.len() {
            continue;
        }
        let d = frame.decompose(s);
        t_ns.push(*t);
        w.push(d.weight);
        theta_rel.push(d.relative_angle());
        for rep in 0..4 {
            pair_populations[rep].push(s.population(rep) + s.population(7 - rep));
        }
    }

    let sim = simulate_logical_gate(&h, &schedule, dt).map_err(|e| e.to_string())?;
    let objective = GateObjective::rx(frame, target_theta);
    Ok(json!({
        "t_ns": t_ns,
        "W": w,
        "theta_rel_rad": theta_rel,
        "pair_populations": pair_populations,
        "pair_labels": ["logical", "spin-1 error", "spin-2 error", "spin-3 error"],
        "fidelity": gate_fidelity(&sim.matrix, &objective),
        "target_theta_rad": target_theta,
        "t_total_ns": schedule.t_total_ns,
        "rabi_rate_GHz": rabi,
    }))
}

fn to_json(result: Result<serde_json::Value, String>) -> String {
    match result {
        Ok(v) => v.to_string(),
        Err(e) => json!({ "error": e }).to_string(),
    }
}

/// Ground-energy dispersion of the eight spin configurations versus one
/// external loop flux.
#[wasm_bindgen]
pub fn flux_spectrum(params_json: &str) -> String {
    to_json(spectrum_impl(params_json))
}

/// Ising couplings, dispersive shifts and EDSR weights at one point of the
/// inductance plane, with the readout line calibrated to the target.
#[wasm_bindgen]
pub fn coupling_map(params_json: &str) -> String {
    to_json(coupling_impl(params_json))
}

/// Lab-frame simulation of a logical R_X gate sequence from the |0> logical
/// state: manifold weight, relative angle and pair populations over time.
#[wasm_bindgen]
pub fn gate_demo(params_json: &str) -> String {
    to_json(gate_impl(params_json))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spectrum_returns_eight_curves() {
        let out = spectrum_impl(r#"{"l_vertical_nh": 5.0, "l_coupling_nh": 5.0, "points": 21}"#)
            .unwrap();
        assert_eq!(out["energies_GHz"].as_array().unwrap().len(), 8);
        assert_eq!(out["flux_rad"].as_array().unwrap().len(), 21);
    }

    #[test]
    fn coupling_map_matches_core_extraction() {
        let out = coupling_impl(r#"{"l_vertical_nh": 3.0, "l_coupling_nh": 6.0}"#).unwrap();
        let j12 = out["J_MHz"]["12"].as_f64().unwrap();
        assert!(j12.abs() > 1.0 && j12.abs() < 10.0, "J12 = {j12} MHz");
        assert!((out["f_r0_GHz"].as_f64().unwrap() - 9.0).abs() < 1e-6);
    }

    #[test]
    fn gate_demo_reaches_high_fidelity() {
        let out = gate_impl(
            r#"{"l_vertical_nh": 5.0, "l_coupling_nh": 5.0, "sequence": "three_pi", "rabi_divisor": 100.0}"#,
        )
        .unwrap();
        assert!(out["fidelity"].as_f64().unwrap() > 0.99);
        let w = out["W"].as_array().unwrap();
        assert!(w.last().unwrap().as_f64().unwrap() > 0.99);
    }

    #[test]
    fn errors_are_reported_as_json() {
        let out = flux_spectrum(r#"{"l_vertical_nh": -1.0, "l_coupling_nh": 5.0}"#);
        assert!(out.contains("error"));
    }
}
