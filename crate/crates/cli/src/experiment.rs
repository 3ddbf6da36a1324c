//! Executes a validated [`ExperimentConfig`] and writes its artifacts.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use anyhow::{bail, Context, Result};
use hhc_core::diagnostics::{
    attach_orders, equivalence_residual, manufactured_problem, rung_errors, solution_error, ConvergenceRow,
    EnergyMonitor, EnergyRecord,
};
use hhc_core::grid::{write_snapshot, GridSpec, Snapshot, StaggeredGrid};
use hhc_core::schemes::{
    explicit_stability_limit, stability_warnings, three_level_form, time_grid, Integrator, Problem, SchemeConfig,
    SchemeKind, SchemeState, ThreeLevelState,
};
use hhc_core::Direction;
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::config::{Command, ExperimentConfig, Refinement};

/// How an experiment ended.
#[derive(Debug, Clone, PartialEq)]
pub enum Status {
    Completed,
    /// Stability preconditions were violated and not overridden; nothing was run.
    Refused(Vec<String>),
    /// A scheme failed mid-run.
    Failed(String),
}

impl Status {
    pub fn id(&self) -> &'static str {
        match self {
            Status::Completed => "completed",
            Status::Refused(_) => "refused",
            Status::Failed(_) => "failed",
        }
    }

    /// Process exit status: 0 on completion, 1 on scheme failure, 2 on refusal.
    pub fn exit_code(&self) -> u8 {
        match self {
            Status::Completed => 0,
            Status::Failed(_) => 1,
            Status::Refused(_) => 2,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Report {
    pub status: Status,
    /// Warnings that were overridden.
    pub warnings: Vec<String>,
    pub outputs: Vec<PathBuf>,
    pub manifest: PathBuf,
    /// Human-readable summary for the terminal.
    pub table: String,
}

/// Fixed 17-significant-digit formatting used in every CSV.
pub fn fmt_real(v: f64) -> String {
    format!("{v:.16e}")
}

/// Per-step amplification `(P_N / P_1)^(1/(N-1))` with `P_n = (‖u^n‖² + ‖u^{n-1}‖²)^½`.
///
/// `norms[n]` is a norm of the temperature at level `n`; at least three levels are needed.
pub fn growth_factor(norms: &[f64]) -> Option<f64> {
    if norms.len() < 3 {
        return None;
    }
    let pair = |n: usize| norms[n].hypot(norms[n - 1]);
    let last = norms.len() - 1;
    let (first, end) = (pair(1), pair(last));
    (first > 0.0).then(|| (end / first).powf(1.0 / (last - 1) as f64))
}

struct Artifacts {
    outputs: Vec<PathBuf>,
    summary: Value,
    table: String,
}

/// Runs the configured command, writing CSVs, snapshots and a JSON manifest to `config.output_dir`.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Report> {
    let started = unix_now();
    let dir = &config.output_dir;
    fs::create_dir_all(dir).with_context(|| format!("creating output directory {}", dir.display()))?;
    let grid = StaggeredGrid::new(config.grid)?;

    let warnings = preconditions(config, &grid)?;
    let (status, artifacts) = if !warnings.is_empty() && !config.override_stability {
        let table = format!(
            "refused: stability preconditions violated (pass --override-stability to run anyway)\n  {}\n",
            warnings.join("\n  ")
        );
        (Status::Refused(warnings.clone()), Artifacts { outputs: Vec::new(), summary: Value::Null, table })
    } else {
        let result = match config.command {
            Command::Run => run_single(config, &grid),
            Command::Converge => converge(config),
            Command::StabilityScan => stability_scan(config, &grid),
            Command::Equivalence => equivalence(config, &grid),
            Command::Bench => bench(config, &grid),
        };
        match result {
            Ok(a) => (Status::Completed, a),
            Err(e) if e.downcast_ref::<hhc_core::HhcError>().is_some() => {
                let msg = format!("{e:#}");
                let table = format!("failed: {msg}\n");
                (Status::Failed(msg), Artifacts { outputs: Vec::new(), summary: Value::Null, table })
            }
            Err(e) => return Err(e),
        }
    };

    let manifest = dir.join("manifest.json");
    let body = json!({
        "command": config.command.id(),
        "status": status.id(),
        "error": match &status { Status::Failed(m) => Value::from(m.clone()), _ => Value::Null },
        "started_unix": started,
        "finished_unix": unix_now(),
        "threads": rayon::current_num_threads(),
        "config": resolved(config),
        "stability_warnings": warnings,
        "outputs": artifacts.outputs.iter().map(|p| p.file_name().map(|n| n.to_string_lossy().into_owned())).collect::<Vec<_>>(),
        "summary": artifacts.summary,
    });
    fs::write(&manifest, serde_json::to_string_pretty(&body)? + "\n")
        .with_context(|| format!("writing {}", manifest.display()))?;
    Ok(Report {
        warnings: if status == Status::Completed { warnings } else { Vec::new() },
        status,
        outputs: artifacts.outputs,
        manifest,
        table: artifacts.table,
    })
}

fn unix_now() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0)
}

fn resolved(config: &ExperimentConfig) -> Value {
    let s = &config.scheme;
    json!({
        "final_time": config.final_time(),
        "grid": { "n1": config.grid.n1, "n2": config.grid.n2, "l1": config.grid.l1, "l2": config.grid.l2 },
        "problem": { "id": config.problem.id(), "omega": config.params.omega },
        "coefficients": {
            "nu": config.params.nu,
            "capacity": config.params.capacity,
            "conductivity": config.params.conductivity,
        },
        "scheme": {
            "kind": s.kind.id(),
            "sigma": s.sigma,
            "tau": s.tau,
            "tol": s.tol,
            "start": format!("{:?}", s.start).to_lowercase(),
            "source_split": format!("{:?}", s.source_split).to_lowercase(),
            "reduced_operator": format!("{:?}", s.reduced_operator).to_lowercase(),
            "regularizer": format!("{:?}", s.regularizer).to_lowercase(),
            "override_stability": config.override_stability,
        },
        "output": { "dir": config.output_dir.display().to_string(), "snapshot": config.snapshot },
        "converge": { "levels": config.converge.levels, "refine": config.converge.refine.id() },
        "scan": { "ratios": config.scan.ratios, "steps": config.scan.steps },
        "bench": { "kinds": config.bench.kinds.iter().map(|k| k.id()).collect::<Vec<_>>(), "steps": config.bench.steps },
        "equivalence": { "kinds": config.equivalence.kinds.iter().map(|k| k.id()).collect::<Vec<_>>() },
    })
}

fn problem_on(config: &ExperimentConfig, grid: &StaggeredGrid<f64>, final_time: f64) -> Result<Problem<f64>> {
    let params = hhc_core::diagnostics::ManufacturedParams { final_time, ..config.params };
    Ok(manufactured_problem(config.problem, grid, &params)?)
}

fn warnings_for(cfg: &SchemeConfig<f64>, problem: &Problem<f64>) -> Result<Vec<String>> {
    let (_, tau) = time_grid(problem.final_time, cfg.tau)?;
    let cfg = SchemeConfig { tau, ..cfg.clone() };
    Ok(stability_warnings(&cfg, &problem.grid, &problem.coefficients, problem.final_time)
        .into_iter()
        .map(|w| w.to_string())
        .collect())
}

/// Every stability condition the command's runs would violate, without duplicates.
fn preconditions(config: &ExperimentConfig, grid: &StaggeredGrid<f64>) -> Result<Vec<String>> {
    let mut out: Vec<String> = Vec::new();
    let mut add = |ws: Vec<String>| {
        for w in ws {
            if !out.contains(&w) {
                out.push(w);
            }
        }
    };
    let kind = config.scheme.kind;
    match config.command {
        Command::Run => {
            add(warnings_for(&config.scheme_config(kind), &problem_on(config, grid, config.final_time())?)?)
        }
        Command::Converge => {
            for (spec, tau) in ladder(config) {
                let g = StaggeredGrid::new(spec)?;
                let cfg = SchemeConfig { tau, ..config.scheme_config(kind) };
                add(warnings_for(&cfg, &problem_on(config, &g, config.final_time())?)?);
            }
        }
        Command::StabilityScan => {
            let problem = problem_on(config, grid, config.final_time())?;
            let limit = explicit_stability_limit(grid, &problem.coefficients)?;
            for &ratio in &config.scan.ratios {
                let tau = ratio * limit;
                let p = problem_on(config, grid, tau * config.scan.steps as f64)?;
                add(warnings_for(&SchemeConfig { tau, ..config.scheme_config(kind) }, &p)?);
            }
        }
        Command::Equivalence | Command::Bench => {
            let kinds = if config.command == Command::Bench { &config.bench.kinds } else { &config.equivalence.kinds };
            let problem = problem_on(config, grid, config.final_time())?;
            for &k in kinds {
                add(warnings_for(&config.scheme_config(k), &problem)?);
            }
        }
    }
    Ok(out)
}

fn ladder(config: &ExperimentConfig) -> Vec<(GridSpec<f64>, f64)> {
    let base = config.grid;
    (0..config.converge.levels)
        .map(|r| {
            let scale = 1usize << r;
            let spec = match config.converge.refine {
                Refinement::SpaceTime => GridSpec::new(base.l1, base.l2, base.n1 * scale, base.n2 * scale),
                Refinement::Time => base,
            };
            (spec, config.scheme.tau / scale as f64)
        })
        .collect()
}

fn csv_writer(path: &Path) -> Result<csv::Writer<File>> {
    csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))
}

fn run_single(config: &ExperimentConfig, grid: &StaggeredGrid<f64>) -> Result<Artifacts> {
    let dir = &config.output_dir;
    let problem = problem_on(config, grid, config.final_time())?;
    let integ = Integrator::new(&problem, config.scheme_config(config.scheme.kind))?;
    let mut monitor = EnergyMonitor::for_integrator(&integ).ok();
    let mut records: Vec<EnergyRecord<f64>> = Vec::new();
    let summary = integ.run(|s| {
        if let Some(m) = monitor.as_mut() {
            records.push(m.observe(s)?);
        }
        Ok(())
    })?;
    let mut outputs = Vec::new();

    if monitor.is_some() {
        let path = dir.join("energy.csv");
        let mut w = csv_writer(&path)?;
        w.write_record(["n", "t", "energy_kind", "value", "bound", "slack", "violated"])?;
        for r in &records {
            w.write_record([
                r.n.to_string(),
                fmt_real(r.t),
                r.kind.id().to_string(),
                fmt_real(r.value),
                fmt_real(r.bound),
                fmt_real(r.slack),
                r.violated.to_string(),
            ])?;
        }
        w.flush()?;
        outputs.push(path);
    }

    let final_state = &summary.final_state;
    if config.snapshot {
        let path = dir.join("final_u.hhc");
        write_field(&path, grid, &Snapshot::Scalar(final_state.temperature().clone()))?;
        outputs.push(path);
        if let Some(q) = final_state.flux() {
            for (dir_, field) in Direction::ALL.iter().zip(q) {
                let path = dir.join(format!("final_q{}.hhc", dir_.index()));
                write_field(&path, grid, &Snapshot::Flux(field.clone()))?;
                outputs.push(path);
            }
        }
    }

    let violations = records.iter().filter(|r| r.violated).count();
    let error = match &problem.exact {
        Some(exact) => {
            let reference = exact.temperature(grid, final_state.time())?;
            Some(solution_error(grid, final_state.temperature(), &reference)?)
        }
        None => None,
    };
    let mut table = format!(
        "{} on {}x{} grid, {} steps of tau = {:.6e} to T = {}\n",
        config.scheme.kind,
        grid.spec().n1,
        grid.spec().n2,
        integ.steps(),
        integ.tau(),
        final_state.time()
    );
    match &monitor {
        Some(m) => table += &format!("energy {}: {} records, {} violated\n", m.kind().id(), records.len(), violations),
        None => table += "energy monitor unavailable for these parameters\n",
    }
    if let Some((emax, el2)) = error {
        table += &format!("error vs exact: max {emax:.6e}, l2 {el2:.6e}\n");
    }
    table += &format!("solver iterations: {}\n", summary.solver_iterations);
    let summary = json!({
        "steps": integ.steps(),
        "tau": integ.tau(),
        "energy_kind": monitor.as_ref().map(|m| m.kind().id()),
        "energy_records": records.len(),
        "violations": violations,
        "solver_iterations": summary.solver_iterations,
        "error_max": error.map(|e| e.0),
        "error_l2": error.map(|e| e.1),
    });
    Ok(Artifacts { outputs, summary, table })
}

fn write_field(path: &Path, grid: &StaggeredGrid<f64>, field: &Snapshot<f64>) -> Result<()> {
    let mut out = BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?);
    write_snapshot(grid, field, &mut out)?;
    out.flush()?;
    Ok(())
}

fn converge(config: &ExperimentConfig) -> Result<Artifacts> {
    if !config.problem.has_exact_solution() {
        bail!("problem {} has no exact solution to converge to", config.problem);
    }
    let kind = config.scheme.kind;
    let mut rows = ladder(config)
        .into_par_iter()
        .map(|(spec, tau)| -> Result<ConvergenceRow<f64>> {
            let grid = StaggeredGrid::new(spec)?;
            let problem = problem_on(config, &grid, config.final_time())?;
            Ok(rung_errors(&problem, &SchemeConfig { tau, ..config.scheme_config(kind) })?)
        })
        .collect::<Result<Vec<_>>>()?;
    attach_orders(&mut rows);

    let path = config.output_dir.join("convergence.csv");
    let mut w = csv_writer(&path)?;
    w.write_record(["h1", "h2", "tau", "err_max", "err_l2", "order_max", "order_l2"])?;
    let mut table = format!(
        "{kind} convergence ({} refinement)\n{:>12} {:>12} {:>12} {:>12} {:>8}\n",
        config.converge.refine.id(),
        "h1",
        "tau",
        "err_max",
        "err_l2",
        "order"
    );
    for r in &rows {
        w.write_record([
            fmt_real(r.h1),
            fmt_real(r.h2),
            fmt_real(r.tau),
            fmt_real(r.error_max),
            fmt_real(r.error_l2),
            r.order_max.map(fmt_real).unwrap_or_default(),
            r.order_l2.map(fmt_real).unwrap_or_default(),
        ])?;
        let order = r.order_max.map(|o| format!("{o:.3}")).unwrap_or_else(|| "-".into());
        table +=
            &format!("{:>12.4e} {:>12.4e} {:>12.4e} {:>12.4e} {:>8}\n", r.h1, r.tau, r.error_max, r.error_l2, order);
    }
    w.flush()?;
    let summary = json!({
        "rungs": rows.len(),
        "orders_max": rows.iter().filter_map(|r| r.order_max).collect::<Vec<_>>(),
    });
    Ok(Artifacts { outputs: vec![path], summary, table })
}

/// Temperature norms at levels `0..=steps` of a run.
pub fn level_norms(problem: &Problem<f64>, cfg: SchemeConfig<f64>) -> hhc_core::Result<Vec<f64>> {
    let integ = Integrator::new(problem, cfg)?;
    let grid = &problem.grid;
    let mut norms = Vec::with_capacity(integ.steps() + 1);
    integ.run(|s| {
        if norms.is_empty() {
            if let Some(prev) = s.previous_temperature() {
                norms.push(grid.norm_h(prev)?);
            }
        }
        norms.push(grid.norm_h(s.temperature())?);
        Ok(())
    })?;
    Ok(norms)
}

fn stability_scan(config: &ExperimentConfig, grid: &StaggeredGrid<f64>) -> Result<Artifacts> {
    let kind = config.scheme.kind;
    let steps = config.scan.steps;
    let coefficients = problem_on(config, grid, config.final_time())?.coefficients;
    let limit = explicit_stability_limit(grid, &coefficients)?;
    let growth = config
        .scan
        .ratios
        .par_iter()
        .map(|&ratio| -> Result<(f64, f64)> {
            let tau = ratio * limit;
            let problem = problem_on(config, grid, tau * steps as f64)?;
            let norms = level_norms(&problem, SchemeConfig { tau, ..config.scheme_config(kind) })?;
            Ok((ratio, growth_factor(&norms).unwrap_or(f64::NAN)))
        })
        .collect::<Result<Vec<_>>>()?;

    let path = config.output_dir.join("stability_scan.csv");
    let mut w = csv_writer(&path)?;
    w.write_record(["ratio", "tau", "growth_factor"])?;
    let mut table = format!(
        "{kind} on {}: tau_max = {limit:.8e}, {steps} steps\n{:>8} {:>14}\n",
        config.problem, "ratio", "growth"
    );
    for &(ratio, g) in &growth {
        w.write_record([fmt_real(ratio), fmt_real(ratio * limit), fmt_real(g)])?;
        table += &format!("{ratio:>8.4} {g:>14.8}\n");
    }
    w.flush()?;
    let summary = json!({ "tau_max": limit, "growth": growth.iter().map(|g| g.1).collect::<Vec<_>>() });
    Ok(Artifacts { outputs: vec![path], summary, table })
}

/// Three-level kind whose trajectory a staggered kind reproduces from matched starting levels.
pub fn three_level_twin(kind: SchemeKind) -> Option<SchemeKind> {
    match kind {
        SchemeKind::StaggeredRegularized => Some(SchemeKind::ThreeLevelRegularized),
        SchemeKind::StaggeredAdditiveQ => Some(SchemeKind::LodQ),
        SchemeKind::StaggeredFluxPerturbed => Some(SchemeKind::LodC),
        _ => None,
    }
}

/// Temperatures at levels `0..=steps` and the step-adjusted configuration.
pub fn temperature_trajectory(
    problem: &Problem<f64>,
    cfg: SchemeConfig<f64>,
) -> hhc_core::Result<(Vec<hhc_core::ScalarField<f64>>, SchemeConfig<f64>)> {
    let integ = Integrator::new(problem, cfg)?;
    let mut traj = Vec::with_capacity(integ.steps() + 1);
    integ.run(|s| {
        if traj.is_empty() {
            if let Some(prev) = s.previous_temperature() {
                traj.push(prev.clone());
            }
        }
        traj.push(s.temperature().clone());
        Ok(())
    })?;
    Ok((traj, integ.config().clone()))
}

/// Largest relative gap between a trajectory and `twin` restarted from its first two levels.
pub fn matched_start_gap(
    problem: &Problem<f64>,
    traj: &[hhc_core::ScalarField<f64>],
    cfg: &SchemeConfig<f64>,
    twin: SchemeKind,
) -> hhc_core::Result<f64> {
    let integ = Integrator::new(problem, SchemeConfig { kind: twin, ..cfg.clone() })?;
    let mut state = SchemeState::ThreeLevel(ThreeLevelState {
        u_prev: traj[0].clone(),
        u_curr: traj[1].clone(),
        n: 1,
        t: integ.tau(),
    });
    let mut worst: f64 = 0.0;
    for expected in &traj[2..] {
        state = integ.step(&state)?.state;
        let scale = expected.max_abs();
        if scale > 0.0 {
            worst = worst.max(state.temperature().sub(expected).max_abs() / scale);
        }
    }
    Ok(worst)
}

fn equivalence(config: &ExperimentConfig, grid: &StaggeredGrid<f64>) -> Result<Artifacts> {
    let problem = problem_on(config, grid, config.final_time())?;
    let path = config.output_dir.join("equivalence.csv");
    let mut w = csv_writer(&path)?;
    w.write_record(["kind", "check", "reference", "levels", "value"])?;
    let mut table = format!("{:<26} {:<22} {:<24} {:>12}\n", "kind", "check", "reference", "value");
    let mut summary = Vec::new();
    for &kind in &config.equivalence.kinds {
        let form = three_level_form(kind).with_context(|| format!("{kind} has no three-level form"))?;
        let (traj, cfg) = temperature_trajectory(&problem, config.scheme_config(kind))?;
        let mut checks = vec![("three-level-residual", kind, equivalence_residual(&form, &traj, 0, &cfg, &problem)?)];
        if let Some(twin) = three_level_twin(kind) {
            checks.push(("matched-start-gap", twin, matched_start_gap(&problem, &traj, &cfg, twin)?));
        }
        for (check, reference, value) in checks {
            w.write_record([
                kind.id().to_string(),
                check.to_string(),
                reference.id().to_string(),
                traj.len().to_string(),
                fmt_real(value),
            ])?;
            table += &format!("{:<26} {:<22} {:<24} {:>12.4e}\n", kind.id(), check, reference.id(), value);
            summary.push(json!({ "kind": kind.id(), "check": check, "reference": reference.id(), "value": value }));
        }
    }
    w.flush()?;
    Ok(Artifacts { outputs: vec![path], summary: Value::from(summary), table })
}

/// Wall time and solver iterations of each of `steps` consecutive steps.
pub fn time_steps(problem: &Problem<f64>, cfg: SchemeConfig<f64>, steps: usize) -> hhc_core::Result<Vec<(f64, usize)>> {
    let integ = Integrator::new(problem, cfg)?;
    let mut state = integ.init()?;
    let mut out = Vec::with_capacity(steps);
    for _ in 0..steps {
        let start = Instant::now();
        let next = integ.step(&state)?;
        out.push((start.elapsed().as_secs_f64(), next.solver_iterations));
        state = next.state;
    }
    Ok(out)
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    match v.len() {
        0 => f64::NAN,
        n if n % 2 == 1 => v[n / 2],
        n => 0.5 * (v[n / 2 - 1] + v[n / 2]),
    }
}

fn bench(config: &ExperimentConfig, grid: &StaggeredGrid<f64>) -> Result<Artifacts> {
    let steps = config.bench.steps;
    let problem = problem_on(config, grid, config.final_time())?;
    let path = config.output_dir.join("bench.csv");
    let summary_path = config.output_dir.join("bench_summary.csv");
    let mut w = csv_writer(&path)?;
    w.write_record(["kind", "step", "wall_seconds", "solver_iterations"])?;
    let mut s = csv_writer(&summary_path)?;
    s.write_record(["kind", "steps", "median_step_seconds", "mean_step_seconds", "mean_solver_iterations"])?;
    let mut table = format!("{:<26} {:>14} {:>14} {:>10}\n", "kind", "median step s", "mean step s", "mean iter");
    let mut summary = Vec::new();
    // Sequential on purpose: concurrent runs would contend for the timed cores.
    for &kind in &config.bench.kinds {
        let timings = time_steps(&problem, config.scheme_config(kind), steps)?;
        for (i, (secs, iters)) in timings.iter().enumerate() {
            w.write_record([kind.id().to_string(), (i + 1).to_string(), fmt_real(*secs), iters.to_string()])?;
        }
        let secs: Vec<f64> = timings.iter().map(|t| t.0).collect();
        let med = median(&secs);
        let mean = secs.iter().sum::<f64>() / secs.len() as f64;
        let iters = timings.iter().map(|t| t.1).sum::<usize>() as f64 / timings.len() as f64;
        s.write_record([kind.id().to_string(), steps.to_string(), fmt_real(med), fmt_real(mean), fmt_real(iters)])?;
        table += &format!("{:<26} {:>14.4e} {:>14.4e} {:>10.1}\n", kind.id(), med, mean, iters);
        summary.push(json!({ "kind": kind.id(), "median_step_seconds": med, "mean_solver_iterations": iters }));
    }
    w.flush()?;
    s.flush()?;
    Ok(Artifacts { outputs: vec![path, summary_path], summary: Value::from(summary), table })
}
