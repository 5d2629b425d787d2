//! Run configuration: JSON schema validation that collects every violation
//! (with JSON-pointer paths) before deserializing into typed structs.
//!
//! All physical quantities carry explicit unit suffixes in their keys;
//! unknown keys are rejected.

use isene_core::circuit::{ChainCircuit, JunctionParams, JunctionSign};
use isene_core::units::SPEED_OF_LIGHT;
use serde::Serialize;
use serde_json::Value;

#[derive(Debug, Clone, Serialize)]
pub struct Violation {
    pub path: String,
    pub message: String,
}

#[derive(Debug)]
pub struct RunConfig {
    pub circuit: ChainCircuit,
    pub line: Option<LineConfig>,
    pub task: TaskConfig,
    pub numerics: Numerics,
}

#[derive(Debug, Clone)]
pub struct LineConfig {
    pub z_c_ohm: f64,
    pub v_eff_m_per_s: f64,
    pub impedance_factor: f64,
    /// Either a fixed length or a calibration target.
    pub length: LineLength,
}

#[derive(Debug, Clone, Copy)]
pub enum LineLength {
    FixedMm(f64),
    CalibrateGhz(f64),
}

#[derive(Debug, Clone)]
pub struct Numerics {
    pub solver_tolerance: f64,
    pub max_iterations: usize,
    pub kappa_mhz: f64,
}

impl Default for Numerics {
    fn default() -> Self {
        Self {
            solver_tolerance: 1e-12,
            max_iterations: 200,
            kappa_mhz: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TaskConfig {
    Solve,
    Extract,
    Check,
    Spectrum {
        flux_loop: usize,
        flux_min_rad: f64,
        flux_max_rad: f64,
        points: usize,
    },
    Scan {
        l_vertical_nh: GridSpec,
        l_coupling_nh: GridSpec,
        with_readout: bool,
    },
    Dynamics {
        sequence: SequenceKind,
        theta_rad: f64,
        rabi_divisor: f64,
    },
    Optimize {
        theta_rad: f64,
        t_total_us: f64,
        steps: usize,
        iterations: usize,
        lambda_a: f64,
    },
    Gates {
        rz: Option<RzSpec>,
        rzz: Option<RzzSpec>,
    },
    Qec {
        superpositions: usize,
        rabi_divisor: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SequenceKind {
    ThreePi,
    ArbitraryTheta,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub min: f64,
    pub max: f64,
    pub points: usize,
}

impl GridSpec {
    pub fn values(&self) -> Vec<f64> {
        if self.points == 1 {
            return vec![self.min];
        }
        (0..self.points)
            .map(|i| self.min + (self.max - self.min) * i as f64 / (self.points - 1) as f64)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RzSpec {
    pub flux_loop: usize,
    pub flux_rad: f64,
    pub duration_ns: f64,
    pub samples: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RzzSpec {
    pub j_inter_ghz: f64,
    pub duration_ns: f64,
}

impl TaskConfig {
    pub fn kind(&self) -> &'static str {
        match self {
            TaskConfig::Solve => "solve",
            TaskConfig::Extract => "extract",
            TaskConfig::Check => "check",
            TaskConfig::Spectrum { .. } => "spectrum",
            TaskConfig::Scan { .. } => "scan",
            TaskConfig::Dynamics { .. } => "dynamics",
            TaskConfig::Optimize { .. } => "optimize",
            TaskConfig::Gates { .. } => "gates",
            TaskConfig::Qec { .. } => "qec",
        }
    }
}

struct Validator {
    violations: Vec<Violation>,
}

impl Validator {
    fn new() -> Self {
        Self { violations: Vec::new() }
    }

    fn push(&mut self, path: &str, message: impl Into<String>) {
        self.violations.push(Violation {
            path: path.to_string(),
            message: message.into(),
        });
    }

    fn object<'v>(&mut self, value: &'v Value, path: &str, keys: &[&str]) -> Option<&'v serde_json::Map<String, Value>> {
        let Some(map) = value.as_object() else {
            self.push(path, "expected an object");
            return None;
        };
        for key in map.keys() {
            if !keys.contains(&key.as_str()) {
                self.push(&format!("{path}/{key}"), "unknown key");
            }
        }
        Some(map)
    }

    fn f64(&mut self, map: &serde_json::Map<String, Value>, path: &str, key: &str) -> Option<f64> {
        match map.get(key) {
            Some(v) => match v.as_f64() {
                Some(x) if x.is_finite() => Some(x),
                _ => {
                    self.push(&format!("{path}/{key}"), "expected a finite number");
                    None
                }
            },
            None => {
                self.push(&format!("{path}/{key}"), "missing required key");
                None
            }
        }
    }

    fn f64_opt(
        &mut self,
        map: &serde_json::Map<String, Value>,
        path: &str,
        key: &str,
        default: f64,
    ) -> f64 {
        match map.get(key) {
            Some(v) => match v.as_f64() {
                Some(x) if x.is_finite() => x,
                _ => {
                    self.push(&format!("{path}/{key}"), "expected a finite number");
                    default
                }
            },
            None => default,
        }
    }

    fn usize_opt(
        &mut self,
        map: &serde_json::Map<String, Value>,
        path: &str,
        key: &str,
        default: usize,
    ) -> usize {
        match map.get(key) {
            Some(v) => match v.as_u64() {
                Some(x) => x as usize,
                None => {
                    self.push(&format!("{path}/{key}"), "expected a non-negative integer");
                    default
                }
            },
            None => default,
        }
    }

    fn positive(&mut self, value: f64, path: &str) -> f64 {
        if value <= 0.0 {
            self.push(path, format!("must be positive, got {value}"));
        }
        value
    }
}

/// Validate and deserialize a parsed JSON document. Returns either the
/// typed config or every violation found.
pub fn parse_config(document: &Value) -> Result<RunConfig, Vec<Violation>> {
    let mut v = Validator::new();
    let root = v.object(document, "", &["circuit", "line", "task", "numerics"]);

    let mut circuit = None;
    let mut line = None;
    let mut task = None;
    let mut numerics = Numerics::default();

    if let Some(root) = root {
        match root.get("circuit") {
            Some(c) => circuit = parse_circuit(&mut v, c),
            None => v.push("/circuit", "missing required key"),
        }
        if let Some(l) = root.get("line") {
            line = parse_line(&mut v, l);
        }
        match root.get("task") {
            Some(t) => task = parse_task(&mut v, t),
            None => v.push("/task", "missing required key"),
        }
        if let Some(n) = root.get("numerics") {
            numerics = parse_numerics(&mut v, n);
        }
    }

    match (circuit, task) {
        (Some(circuit), Some(task)) if v.violations.is_empty() => Ok(RunConfig {
            circuit,
            line,
            task,
            numerics,
        }),
        _ => Err(v.violations),
    }
}

fn parse_circuit(v: &mut Validator, value: &Value) -> Option<ChainCircuit> {
    let map = v.object(
        value,
        "/circuit",
        &[
            "junctions",
            "vertical_inductances_nH",
            "coupling_inductances_nH",
            "external_fluxes_rad",
            "junction_sign",
        ],
    )?;

    let mut junctions = Vec::new();
    match map.get("junctions") {
        Some(Value::Array(arr)) if !arr.is_empty() => {
            for (i, j) in arr.iter().enumerate() {
                let path = format!("/circuit/junctions/{i}");
                if let Some(jm) = v.object(j, &path, &["e0_GHz", "e_sigma_GHz"]) {
                    let e0 = v.f64(jm, &path, "e0_GHz");
                    let es = v.f64(jm, &path, "e_sigma_GHz");
                    if let (Some(e0), Some(es)) = (e0, es) {
                        if es < 0.0 {
                            v.push(&format!("{path}/e_sigma_GHz"), "must be non-negative");
                        } else {
                            junctions.push(JunctionParams { e0_ghz: e0, e_sigma_ghz: es });
                        }
                    }
                }
            }
        }
        Some(_) => v.push("/circuit/junctions", "expected a non-empty array"),
        None => v.push("/circuit/junctions", "missing required key"),
    }

    let floats = |v: &mut Validator, key: &str| -> Vec<f64> {
        let path = format!("/circuit/{key}");
        match map.get(key) {
            Some(Value::Array(arr)) => arr
                .iter()
                .enumerate()
                .filter_map(|(i, x)| match x.as_f64() {
                    Some(f) if f.is_finite() => Some(f),
                    _ => {
                        v.push(&format!("{path}/{i}"), "expected a finite number");
                        None
                    }
                })
                .collect(),
            Some(_) => {
                v.push(&path, "expected an array of numbers");
                vec![]
            }
            None => {
                v.push(&path, "missing required key");
                vec![]
            }
        }
    };
    let vertical = floats(v, "vertical_inductances_nH");
    let coupling = floats(v, "coupling_inductances_nH");
    let fluxes = floats(v, "external_fluxes_rad");
    for (i, &l) in vertical.iter().enumerate() {
        if l <= 0.0 {
            v.push(
                &format!("/circuit/vertical_inductances_nH/{i}"),
                format!("inductance must be positive, got {l}"),
            );
        }
    }
    for (i, &l) in coupling.iter().enumerate() {
        if l <= 0.0 {
            v.push(
                &format!("/circuit/coupling_inductances_nH/{i}"),
                format!("inductance must be positive, got {l}"),
            );
        }
    }

    let sign = match map.get("junction_sign") {
        None => JunctionSign::NegativeCos,
        Some(Value::String(s)) if s == "negative_cos" => JunctionSign::NegativeCos,
        Some(Value::String(s)) if s == "positive_cos" => JunctionSign::PositiveCos,
        Some(_) => {
            v.push(
                "/circuit/junction_sign",
                "expected \"negative_cos\" or \"positive_cos\"",
            );
            JunctionSign::NegativeCos
        }
    };

    if !v.violations.is_empty() {
        return None;
    }
    match ChainCircuit::new(junctions, vertical, coupling, fluxes) {
        Ok(mut c) => {
            c.junction_sign = sign;
            Some(c)
        }
        Err(e) => {
            v.push("/circuit", e.to_string());
            None
        }
    }
}

fn parse_line(v: &mut Validator, value: &Value) -> Option<LineConfig> {
    let map = v.object(
        value,
        "/line",
        &[
            "Z_c_ohm",
            "v_eff_m_per_s",
            "v_eff_over_c",
            "length_mm",
            "calibrate_f0_GHz",
            "impedance_factor",
        ],
    )?;
    let z_c = v.f64(map, "/line", "Z_c_ohm")?;
    v.positive(z_c, "/line/Z_c_ohm");

    let v_eff = match (map.get("v_eff_m_per_s"), map.get("v_eff_over_c")) {
        (Some(_), Some(_)) => {
            v.push("/line/v_eff_over_c", "give either v_eff_m_per_s or v_eff_over_c, not both");
            return None;
        }
        (Some(_), None) => v.f64(map, "/line", "v_eff_m_per_s")?,
        (None, Some(_)) => v.f64(map, "/line", "v_eff_over_c")? * SPEED_OF_LIGHT,
        (None, None) => {
            v.push("/line/v_eff_m_per_s", "missing phase velocity (v_eff_m_per_s or v_eff_over_c)");
            return None;
        }
    };
    v.positive(v_eff, "/line/v_eff_m_per_s");

    let length = match (map.get("length_mm"), map.get("calibrate_f0_GHz")) {
        (Some(_), Some(_)) => {
            v.push("/line/calibrate_f0_GHz", "give either length_mm or calibrate_f0_GHz, not both");
            return None;
        }
        (Some(_), None) => {
            let l = v.f64(map, "/line", "length_mm")?;
            v.positive(l, "/line/length_mm");
            LineLength::FixedMm(l)
        }
        (None, Some(_)) => {
            let f = v.f64(map, "/line", "calibrate_f0_GHz")?;
            v.positive(f, "/line/calibrate_f0_GHz");
            LineLength::CalibrateGhz(f)
        }
        (None, None) => {
            v.push("/line/length_mm", "missing length_mm or calibrate_f0_GHz");
            return None;
        }
    };
    let factor = v.f64_opt(map, "/line", "impedance_factor", 2.0);
    Some(LineConfig {
        z_c_ohm: z_c,
        v_eff_m_per_s: v_eff,
        impedance_factor: factor,
        length,
    })
}

fn parse_grid(v: &mut Validator, value: &Value, path: &str) -> Option<GridSpec> {
    let map = v.object(value, path, &["min", "max", "points"])?;
    let min = v.f64(map, path, "min")?;
    let max = v.f64(map, path, "max")?;
    let points = v.usize_opt(map, path, "points", 0);
    if points < 1 {
        v.push(&format!("{path}/points"), "need at least one point");
        return None;
    }
    if min <= 0.0 || max <= 0.0 {
        v.push(path, "grid bounds must be positive");
    }
    if max < min {
        v.push(path, "max must be >= min");
    }
    Some(GridSpec { min, max, points })
}

fn parse_task(v: &mut Validator, value: &Value) -> Option<TaskConfig> {
    let Some(map) = value.as_object() else {
        v.push("/task", "expected an object");
        return None;
    };
    let kind = match map.get("kind").and_then(Value::as_str) {
        Some(k) => k.to_string(),
        None => {
            v.push("/task/kind", "missing task kind");
            return None;
        }
    };
    match kind.as_str() {
        "solve" => {
            v.object(value, "/task", &["kind"]);
            Some(TaskConfig::Solve)
        }
        "extract" => {
            v.object(value, "/task", &["kind"]);
            Some(TaskConfig::Extract)
        }
        "check" => {
            v.object(value, "/task", &["kind"]);
            Some(TaskConfig::Check)
        }
        "spectrum" => {
            let map = v.object(
                value,
                "/task",
                &["kind", "flux_loop", "flux_min_rad", "flux_max_rad", "points"],
            )?;
            let flux_loop = v.usize_opt(map, "/task", "flux_loop", 0);
            let lo = v.f64(map, "/task", "flux_min_rad")?;
            let hi = v.f64(map, "/task", "flux_max_rad")?;
            let points = v.usize_opt(map, "/task", "points", 41);
            if points < 2 {
                v.push("/task/points", "need at least two points");
            }
            if hi <= lo {
                v.push("/task/flux_max_rad", "must exceed flux_min_rad");
            }
            Some(TaskConfig::Spectrum {
                flux_loop,
                flux_min_rad: lo,
                flux_max_rad: hi,
                points,
            })
        }
        "scan" => {
            let map = v.object(
                value,
                "/task",
                &["kind", "l_vertical_nH", "l_coupling_nH", "with_readout"],
            )?;
            let lv = map
                .get("l_vertical_nH")
                .and_then(|g| parse_grid(v, g, "/task/l_vertical_nH"));
            let lc = map
                .get("l_coupling_nH")
                .and_then(|g| parse_grid(v, g, "/task/l_coupling_nH"));
            if map.get("l_vertical_nH").is_none() {
                v.push("/task/l_vertical_nH", "missing required key");
            }
            if map.get("l_coupling_nH").is_none() {
                v.push("/task/l_coupling_nH", "missing required key");
            }
            let with_readout = map
                .get("with_readout")
                .and_then(Value::as_bool)
                .unwrap_or(true);
            Some(TaskConfig::Scan {
                l_vertical_nh: lv?,
                l_coupling_nh: lc?,
                with_readout,
            })
        }
        "dynamics" => {
            let map = v.object(
                value,
                "/task",
                &["kind", "sequence", "theta_rad", "rabi_divisor"],
            )?;
            let sequence = match map.get("sequence").and_then(Value::as_str) {
                None | Some("three_pi") => SequenceKind::ThreePi,
                Some("arbitrary_theta") => SequenceKind::ArbitraryTheta,
                Some(other) => {
                    v.push("/task/sequence", format!("unknown sequence \"{other}\""));
                    SequenceKind::ThreePi
                }
            };
            let theta = v.f64_opt(map, "/task", "theta_rad", std::f64::consts::PI);
            let divisor = v.f64_opt(map, "/task", "rabi_divisor", 100.0);
            v.positive(divisor, "/task/rabi_divisor");
            Some(TaskConfig::Dynamics {
                sequence,
                theta_rad: theta,
                rabi_divisor: divisor,
            })
        }
        "optimize" => {
            let map = v.object(
                value,
                "/task",
                &["kind", "theta_rad", "t_total_us", "steps", "iterations", "lambda_a"],
            )?;
            let theta = v.f64(map, "/task", "theta_rad")?;
            let t_total = v.f64_opt(map, "/task", "t_total_us", 5.0);
            v.positive(t_total, "/task/t_total_us");
            let steps = v.usize_opt(map, "/task", "steps", 5000);
            let iterations = v.usize_opt(map, "/task", "iterations", 500);
            let lambda = v.f64_opt(map, "/task", "lambda_a", 3.0);
            v.positive(lambda, "/task/lambda_a");
            Some(TaskConfig::Optimize {
                theta_rad: theta,
                t_total_us: t_total,
                steps,
                iterations,
                lambda_a: lambda,
            })
        }
        "gates" => {
            let map = v.object(value, "/task", &["kind", "rz", "rzz"])?;
            let rz = map.get("rz").and_then(|r| {
                let path = "/task/rz";
                let rm = v.object(r, path, &["flux_loop", "flux_rad", "duration_ns", "samples"])?;
                let flux_loop = v.usize_opt(rm, path, "flux_loop", 0);
                let flux = v.f64(rm, path, "flux_rad")?;
                let duration = v.f64(rm, path, "duration_ns")?;
                v.positive(duration, "/task/rz/duration_ns");
                let samples = v.usize_opt(rm, path, "samples", 41);
                Some(RzSpec {
                    flux_loop,
                    flux_rad: flux,
                    duration_ns: duration,
                    samples,
                })
            });
            let rzz = map.get("rzz").and_then(|r| {
                let path = "/task/rzz";
                let rm = v.object(r, path, &["j_inter_GHz", "duration_ns"])?;
                let j = v.f64(rm, path, "j_inter_GHz")?;
                let duration = v.f64(rm, path, "duration_ns")?;
                v.positive(duration, "/task/rzz/duration_ns");
                Some(RzzSpec {
                    j_inter_ghz: j,
                    duration_ns: duration,
                })
            });
            if map.get("rz").is_none() && map.get("rzz").is_none() {
                v.push("/task", "gates task needs an rz and/or rzz block");
            }
            Some(TaskConfig::Gates { rz, rzz })
        }
        "qec" => {
            let map = v.object(
                value,
                "/task",
                &["kind", "superpositions", "rabi_divisor"],
            )?;
            let superpositions = v.usize_opt(map, "/task", "superpositions", 20);
            let divisor = v.f64_opt(map, "/task", "rabi_divisor", 400.0);
            v.positive(divisor, "/task/rabi_divisor");
            Some(TaskConfig::Qec {
                superpositions,
                rabi_divisor: divisor,
            })
        }
        other => {
            v.push("/task/kind", format!("unknown task \"{other}\""));
            None
        }
    }
}

fn parse_numerics(v: &mut Validator, value: &Value) -> Numerics {
    let mut n = Numerics::default();
    if let Some(map) = v.object(
        value,
        "/numerics",
        &["solver_tolerance_GHz_per_rad", "max_iterations", "kappa_MHz"],
    ) {
        n.solver_tolerance =
            v.f64_opt(map, "/numerics", "solver_tolerance_GHz_per_rad", n.solver_tolerance);
        n.max_iterations = v.usize_opt(map, "/numerics", "max_iterations", n.max_iterations);
        n.kappa_mhz = v.f64_opt(map, "/numerics", "kappa_MHz", n.kappa_mhz);
        v.positive(n.solver_tolerance, "/numerics/solver_tolerance_GHz_per_rad");
        v.positive(n.kappa_mhz, "/numerics/kappa_MHz");
    }
    n
}
