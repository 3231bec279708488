//! Runs the tasks of a scenario and writes their artefacts.

use std::fs;
use std::io;
use std::path::Path;

use filippov::conley::{
    analyze, build_outer_map, orbit_neighbourhood, CubicalGrid, CubicalSet, OuterMap, Verdict,
};
use filippov::poincare::{
    classify_orbit, find_periodic, return_map_derivative, validate_section, PeriodicOrbit, Region,
    SectionSpec,
};
use filippov::regularization::continuation_experiment;
use filippov::semiflow::{semiflow, FilippovFlow};
use filippov::system::{PiecewiseSystem, RegionLabel};
use serde_json::{json, Value};

use crate::scenario::{ConleyTask, DetectTask, RegularizeTask, Scenario, SimulateTask, Task};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_TASK: i32 = 3;
pub const EXIT_PARSE: i32 = 4;

/// Number of points sampled along a periodic orbit to seed the Conley tube.
const TRACE_POINTS: usize = 4000;
const MAX_CUBES: usize = 1 << 20;

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub exit_code: i32,
    pub summary: Value,
}

struct Detected {
    spec: SectionSpec,
    orbit: PeriodicOrbit,
}

struct State<'a> {
    z: &'a PiecewiseSystem,
    out: &'a Path,
    detected: Option<Detected>,
    neighbourhood: Option<CubicalSet>,
    simulations: usize,
}

struct TaskResult {
    ok: bool,
    files: Vec<String>,
    details: Value,
}

impl TaskResult {
    fn failed(message: impl Into<String>) -> Self {
        TaskResult {
            ok: false,
            files: Vec::new(),
            details: json!({ "error": message.into() }),
        }
    }
}

/// Which tasks a subcommand runs: its own kind plus the tasks it depends on.
pub fn selects(command: &str, task: &Task) -> bool {
    let name = task.name();
    match command {
        "pipeline" => true,
        "conley" | "regularize" => name == command || name == "detect" || (command == "regularize" && name == "conley"),
        _ => name == command,
    }
}

fn write(out: &Path, name: &str, contents: &str) -> io::Result<String> {
    fs::write(out.join(name), contents)?;
    Ok(name.to_string())
}

fn pretty(v: &impl serde::Serialize) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

/// Validates the system, then runs the selected tasks in file order.
/// Every file lands in `out`, and `summary.json` lists them.
pub fn run(scenario: &Scenario, out: &Path, command: &str) -> io::Result<RunOutcome> {
    fs::create_dir_all(out)?;
    let mut tasks_json = Vec::new();
    let z = match scenario.system() {
        Ok(z) => z,
        Err(e) => {
            let summary = json!({ "scenario": scenario.name, "exitCode": EXIT_PARSE, "error": e.to_string() });
            write(out, "summary.json", &pretty(&summary))?;
            return Ok(RunOutcome { exit_code: EXIT_PARSE, summary });
        }
    };

    let report = z.validate();
    write(out, "validation.json", &pretty(&report))?;
    tasks_json.push(json!({
        "task": "validate",
        "status": if report.passed { "ok" } else { "failed" },
        "files": ["validation.json"],
        "sigmaSamples": report.sigma_samples,
        "regularValueViolations": report.regular_value_violation_count,
        "escapingPoints": report.escaping_count,
        "unsupportedTangencies": report.unsupported.len(),
    }));
    let mut exit_code = EXIT_OK;
    if !report.passed {
        exit_code = EXIT_VALIDATION;
    } else {
        let mut state = State {
            z: &z,
            out,
            detected: None,
            neighbourhood: None,
            simulations: 0,
        };
        for task in scenario.tasks.iter().filter(|t| selects(command, t)) {
            let result = match task {
                Task::Validate => continue,
                Task::Classify(c) => classify(&mut state, &c.points)?,
                Task::Simulate(s) => simulate(&mut state, s)?,
                Task::Detect(d) => detect(&mut state, d)?,
                Task::Conley(c) => conley(&mut state, c)?,
                Task::Regularize(r) => regularize(&mut state, r)?,
            };
            if !result.ok {
                exit_code = EXIT_TASK;
            }
            let mut entry = json!({
                "task": task.name(),
                "status": if result.ok { "ok" } else { "failed" },
                "files": result.files,
            });
            if let (Value::Object(m), Value::Object(d)) = (&mut entry, result.details) {
                m.extend(d);
            }
            tasks_json.push(entry);
        }
    }
    let summary = json!({
        "scenario": scenario.name,
        "dimension": scenario.dimension,
        "command": command,
        "exitCode": exit_code,
        "tasks": tasks_json,
    });
    write(out, "summary.json", &pretty(&summary))?;
    Ok(RunOutcome { exit_code, summary })
}

fn label_name(l: &RegionLabel) -> String {
    match l {
        RegionLabel::Tangent(info) => format!("Tangent{:?}", info.case),
        other => format!("{other:?}"),
    }
}

fn classify(st: &mut State, points: &[Vec<f64>]) -> io::Result<TaskResult> {
    let pts = if points.is_empty() {
        st.z.sample_sigma(if st.z.dim() == 2 { 41 } else { 11 })
    } else {
        points.to_vec()
    };
    let rows: Vec<Value> = pts
        .iter()
        .map(|p| {
            let label = st.z.classify_point(p);
            json!({ "point": p, "label": label_name(&label), "detail": label })
        })
        .collect();
    let mut counts = std::collections::BTreeMap::<String, usize>::new();
    for r in &rows {
        *counts.entry(r["label"].as_str().unwrap().to_string()).or_default() += 1;
    }
    let file = write(st.out, "classify.json", &pretty(&json!({ "points": rows, "counts": counts })))?;
    Ok(TaskResult {
        ok: true,
        files: vec![file],
        details: json!({ "counts": counts }),
    })
}

fn simulate(st: &mut State, t: &SimulateTask) -> io::Result<TaskResult> {
    let k = st.simulations;
    st.simulations += 1;
    match semiflow(st.z, &t.p0, t.t) {
        Ok(tr) => {
            let file = write(st.out, &format!("trajectory_{k}.csv"), &tr.to_csv())?;
            let fields: Vec<&str> = tr.field_sequence.iter().map(|f| f.label()).collect();
            Ok(TaskResult {
                ok: true,
                files: vec![file],
                details: json!({
                    "endTime": tr.end_time(),
                    "endPoint": tr.end_point(),
                    "truncation": tr.truncation,
                    "switchPoints": tr.switch_points,
                    "fieldSequence": fields,
                    "grazes": tr.all_grazes().count(),
                }),
            })
        }
        Err(e) => Ok(TaskResult::failed(e.to_string())),
    }
}

fn detect(st: &mut State, d: &DetectTask) -> io::Result<TaskResult> {
    let spec = match SectionSpec::new(d.anchor.clone(), d.normal.clone(), d.radius, d.sense, d.window) {
        Ok(s) => s,
        Err(e) => return Ok(TaskResult::failed(e.to_string())),
    };
    let flow = FilippovFlow::new(st.z.clone());
    let orbit = match find_periodic(&flow, &spec, &d.seed, d.max_iter, d.t_cap) {
        Ok(o) => o,
        Err(e) => return Ok(TaskResult::failed(e.to_string())),
    };
    let cls = classify_orbit(Some(st.z), &orbit, || {
        return_map_derivative(&flow, &spec, &orbit.base_point, 1e-6, d.t_cap).ok()
    });
    let record = json!({
        "kind": cls.kind,
        "period": orbit.period,
        "closureError": orbit.closure_error,
        "basePoint": orbit.base_point,
        "iterations": orbit.iterations,
        "hyperbolic": cls.hyperbolic,
        "etaPrime": cls.eta_prime,
        "foldCensus": cls.fold_census,
        "arcKinds": cls.arc_kinds,
        "section": spec,
    });
    let files = vec![
        write(st.out, "orbit.json", &pretty(&record))?,
        write(st.out, "orbit.csv", &orbit.trajectory.to_csv())?,
    ];
    let details = json!({ "kind": cls.kind, "period": orbit.period, "closureError": orbit.closure_error });
    st.detected = Some(Detected { spec, orbit });
    Ok(TaskResult { ok: true, files, details })
}

/// Points sampled uniformly in time along one period of `orbit`.
pub fn orbit_trace(orbit: &PeriodicOrbit, samples: usize) -> Vec<Vec<f64>> {
    (0..samples)
        .filter_map(|k| orbit.trajectory.at(orbit.period * k as f64 / samples as f64))
        .collect()
}

fn conley(st: &mut State, c: &ConleyTask) -> io::Result<TaskResult> {
    let bounds = c.grid_box.clone().unwrap_or_else(|| st.z.domain.clone());
    let grid = match CubicalGrid::uniform(&bounds, c.resolution) {
        Ok(g) => g,
        Err(e) => return Ok(TaskResult::failed(e.to_string())),
    };
    let mut flow = FilippovFlow::new(st.z.clone());
    flow.options.record_grazes = false;
    let tau = match (c.tau, &st.detected) {
        (Some(t), _) => t,
        (None, Some(d)) => c.tau_fraction * d.orbit.period,
        (None, None) => return Ok(TaskResult::failed("conley needs `tau` or an earlier detect task")),
    };
    let map: Result<OuterMap, _> = match &st.detected {
        Some(d) => orbit_neighbourhood(
            &flow,
            &grid,
            &orbit_trace(&d.orbit, TRACE_POINTS),
            tau,
            c.samples,
            c.bloat,
            c.tube * c.bloat.max(1),
            MAX_CUBES,
        ),
        None => build_outer_map(&flow, &CubicalSet::full(&grid), tau, c.samples, c.bloat),
    };
    let f = match map {
        Ok(f) => f,
        Err(e) => return Ok(TaskResult::failed(e.to_string())),
    };
    let n = f.domain.clone();
    let section = st.detected.as_ref().map(|d| {
        let inside = |p: &[f64]| n.contains_point(p);
        let region = Region {
            contains: &inside,
            bounds: grid.bounds(),
        };
        let cap = c.t_cap.unwrap_or(10.0 * d.orbit.period);
        validate_section(&flow, &region, &d.spec, c.section_samples, cap)
    });
    let report = match analyze(&f, &n, section) {
        Ok(r) => r,
        Err(e) => return Ok(TaskResult::failed(e.to_string())),
    };
    let files = vec![
        write(st.out, "conley.json", &pretty(&report.to_json()))?,
        write(st.out, "conley_n.csv", &report.n.to_csv())?,
        write(st.out, "conley_l.csv", &report.l.to_csv())?,
        write(st.out, "conley_invariant.csv", &report.invariant_cubes.to_csv())?,
    ];
    st.neighbourhood = Some(n);
    Ok(TaskResult {
        ok: report.verdict != Verdict::NotIsolating,
        files,
        details: json!({
            "verdict": report.verdict,
            "isolating": report.isolating,
            "bettiPerDegree": report.betti,
            "tau": tau,
        }),
    })
}

fn regularize(st: &mut State, r: &RegularizeTask) -> io::Result<TaskResult> {
    let Some(d) = &st.detected else {
        return Ok(TaskResult::failed("regularize needs an earlier detect task"));
    };
    let domain = st.z.domain.clone();
    let report = match &st.neighbourhood {
        Some(n) => {
            let inside = |p: &[f64]| n.contains_point(p);
            continuation_experiment(st.z, &inside, &d.spec, &d.orbit, &r.eps, r.t_cap)
        }
        None => {
            let inside = |p: &[f64]| domain.contains(p);
            continuation_experiment(st.z, &inside, &d.spec, &d.orbit, &r.eps, r.t_cap)
        }
    };
    let file = write(st.out, "continuation.json", &pretty(&report))?;
    Ok(TaskResult {
        ok: true,
        files: vec![file],
        details: json!({
            "empiricalEps0": report.empirical_eps0,
            "driftMonotone": report.drift_monotone,
            "insideNeighbourhood": st.neighbourhood.is_some(),
        }),
    })
}

