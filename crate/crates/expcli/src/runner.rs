//! The experiment matrix: planning, execution and the derived tables.

use std::collections::BTreeSet;
use std::fs;
use std::io;
use std::path::Path;

use mrt_core::hydrate::{build_test1_system, Grid, HydrateSystem};
use mrt_core::perf::{
    activity_numbers, fit_work_ratio, measure_work, speedup_compound_fast, speedup_semi_implicit, ActivityNumbers,
    WorkMeasurement, WorkModel,
};
use mrt_core::{build_uniform_mesh, march, RunReport, SchemeConfig, SchemeKind};
use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::config::{uses_order, ExperimentConfig, RunSpec};
use crate::metrics::{l2_error, relative_error, Field, Profile};
use crate::trajectory::{fmt_num, fmt_opt, trajectory_csv};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Reference,
    Baseline,
    Matrix,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunId {
    pub role: Role,
    pub scheme: SchemeKind,
    pub m: usize,
    /// Extrapolation order, for schemes that take one.
    pub p: Option<usize>,
}

impl RunId {
    /// File stem, unique within a sweep.
    pub fn label(&self) -> String {
        let prefix = match self.role {
            Role::Reference => "reference_",
            Role::Baseline => "baseline_",
            Role::Matrix => "",
        };
        match self.p {
            Some(p) => format!("{prefix}{}_p{p}_m{}", self.scheme, self.m),
            None => format!("{prefix}{}_m{}", self.scheme, self.m),
        }
    }

    fn from_spec(role: Role, spec: &RunSpec) -> Self {
        Self { role, scheme: spec.scheme, m: spec.m, p: uses_order(spec.scheme).then_some(spec.p) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunFailure {
    pub class: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub id: RunId,
    pub expected_failure: bool,
    pub outcome: Result<RunReport, RunFailure>,
}

impl RunRecord {
    pub fn report(&self) -> Option<&RunReport> {
        self.outcome.as_ref().ok()
    }

    /// Completed, or failed while marked as expected to fail.
    pub fn acceptable(&self) -> bool {
        self.outcome.is_ok() || self.expected_failure
    }
}

/// Reference, baseline, then the matrix in configuration order, without repeats.
pub fn plan(config: &ExperimentConfig) -> Vec<RunId> {
    let mut ids = vec![RunId::from_spec(Role::Reference, &config.reference), RunId::from_spec(Role::Baseline, &config.baseline)];
    let mut seen = BTreeSet::new();
    for entry in &config.schemes {
        let ps: Vec<Option<usize>> = if !uses_order(entry.kind) {
            vec![None]
        } else if entry.p.is_empty() {
            vec![Some(0)]
        } else {
            entry.p.iter().map(|&p| Some(p)).collect()
        };
        for &p in &ps {
            for &m in entry.m.as_deref().unwrap_or(&config.mesh.m) {
                if seen.insert((entry.kind.as_str(), p, m)) {
                    ids.push(RunId { role: Role::Matrix, scheme: entry.kind, m, p });
                }
            }
        }
    }
    ids
}

pub fn scheme_config(config: &ExperimentConfig, id: &RunId) -> SchemeConfig {
    let mut sc = SchemeConfig::new(id.scheme).with_order(id.p.unwrap_or(0));
    let s = &config.solver;
    if let Some(v) = s.error_reduction {
        sc.newton_main.error_reduction = v;
    }
    if let Some(v) = s.abs_tol {
        sc.newton_main.abs_tol = v;
    }
    if let Some(v) = s.max_iterations {
        sc.newton_main.max_iterations = v;
        sc.newton_relaxed.max_iterations = v;
    }
    if let Some(v) = s.relaxed_error_reduction {
        sc.newton_relaxed.error_reduction = v;
    }
    if let Some(v) = s.fixed_point_tol {
        sc.fixed_point_tol = v;
    }
    if let Some(v) = s.fixed_point_max {
        sc.fixed_point_max = v;
    }
    sc
}

pub fn execute_run(system: &HydrateSystem, config: &ExperimentConfig, id: &RunId) -> Result<RunReport, RunFailure> {
    let mesh = build_uniform_mesh(config.mesh.t_end, config.mesh.h, id.m)
        .map_err(|e| RunFailure { class: "MeshError".into(), message: e.to_string() })?;
    march(system, &mesh, &scheme_config(config, id))
        .map_err(|e| RunFailure { class: e.class().into(), message: e.to_string() })
}

/// All runs of one sweep together with the system they share.
pub struct Sweep {
    pub config: ExperimentConfig,
    pub system: HydrateSystem,
    pub records: Vec<RunRecord>,
}

/// Runs every planned job in order. Jobs run one at a time so that the
/// wall-clock split of each run is not disturbed by the others.
pub fn execute(config: &ExperimentConfig, progress: &mut dyn FnMut(&RunRecord)) -> Result<Sweep, String> {
    let system = build_test1_system(config.model.clone())?;
    let mut records = Vec::new();
    for id in plan(config) {
        let outcome = execute_run(&system, config, &id);
        let record = RunRecord { id, expected_failure: config.expects_failure(id.scheme, id.m, id.p), outcome };
        progress(&record);
        records.push(record);
    }
    Ok(Sweep { config: config.clone(), system, records })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorRow {
    pub scheme: SchemeKind,
    pub p: Option<usize>,
    pub m: usize,
    pub field: Field,
    pub t: f64,
    pub l2: f64,
    pub relative: Option<f64>,
}

pub const ERRORS_HEADER: &str = "scheme,p,m,field,t,L2,relative";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpeedupRow {
    pub m: usize,
    pub modeled_semi: f64,
    pub modeled_cf: f64,
    pub measured_semi: Option<f64>,
    pub measured_cf: Option<f64>,
}

pub const SPEEDUP_HEADER: &str = "m,modeled_semi,modeled_cf,measured_semi,measured_cf";

/// Work model behind the modeled columns of the speed-up table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpeedupSummary {
    /// Baseline instrumentation: `W_f`, `W_g`, `n_it`, `n_fp`.
    pub baseline: WorkModel,
    /// `C` from the baseline timers.
    pub c_instrumented: f64,
    /// `C` fitted to the measured semi-implicit curve.
    pub c_fitted: Option<f64>,
    pub n_s1: f64,
    pub model: WorkModel,
    pub rows: Vec<SpeedupRow>,
}

fn mean(v: &[f64]) -> Option<f64> {
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

impl Sweep {
    pub fn grid(&self) -> &Grid {
        self.system.grid()
    }

    fn find(&self, role: Role) -> Option<&RunReport> {
        self.records.iter().find(|r| r.id.role == role).and_then(RunRecord::report)
    }

    pub fn reference(&self) -> Option<&RunReport> {
        self.find(Role::Reference)
    }

    pub fn baseline(&self) -> Option<&RunReport> {
        self.find(Role::Baseline)
    }

    pub fn matrix_report(&self, scheme: SchemeKind, p: Option<usize>, m: usize) -> Option<&RunReport> {
        self.records
            .iter()
            .find(|r| r.id.role == Role::Matrix && r.id.scheme == scheme && r.id.p == p && r.id.m == m)
            .and_then(RunRecord::report)
    }

    pub fn all_acceptable(&self) -> bool {
        self.records.iter().all(RunRecord::acceptable)
    }

    /// Errors of the baseline and every completed matrix run at the configured
    /// times, plus a note for each entry that could not be evaluated.
    pub fn error_rows(&self) -> (Vec<ErrorRow>, Vec<String>) {
        let (mut rows, mut notes) = (Vec::new(), Vec::new());
        let Some(reference) = self.reference() else {
            notes.push("reference run failed; no errors computed".into());
            return (rows, notes);
        };
        let baseline = self.baseline();
        let length = self.grid().length;
        for rec in self.records.iter().filter(|r| r.id.role != Role::Reference) {
            let Some(run) = rec.report() else { continue };
            for &t in &self.config.output.error_times {
                for field in Field::ALL {
                    let profile = Profile::from_report(run, length, field, t)
                        .and_then(|p| Ok((p, Profile::from_report(reference, length, field, t)?)));
                    let l2 = match profile.and_then(|(p, r)| l2_error(&p, &r)) {
                        Ok(v) => v,
                        Err(e) => {
                            notes.push(format!("{} {} t={}: {e}", rec.id.label(), field.name(), fmt_num(t)));
                            continue;
                        }
                    };
                    let relative = match baseline.map(|b| relative_error(run, b, reference, length, field, t)) {
                        Some(Ok(v)) => Some(v),
                        Some(Err(e)) => {
                            notes.push(format!("{} {} t={}: {e}", rec.id.label(), field.name(), fmt_num(t)));
                            None
                        }
                        None => None,
                    };
                    rows.push(ErrorRow { scheme: rec.id.scheme, p: rec.id.p, m: rec.id.m, field, t, l2, relative });
                }
            }
        }
        (rows, notes)
    }

    /// Measured speed-ups against the baseline and the fitted work model.
    pub fn speedup(&self) -> Result<SpeedupSummary, String> {
        let baseline = self.baseline().ok_or("baseline run failed")?;
        let base = measure_work(baseline, baseline).map_err(|e| e.to_string())?.model;
        let order = Some(self.config.output.speedup_order);
        let measure = |scheme: SchemeKind, p: Option<usize>| -> Vec<WorkMeasurement> {
            self.records
                .iter()
                .filter(|r| r.id.role == Role::Matrix && r.id.scheme == scheme && r.id.p == p)
                .filter_map(|r| r.report().and_then(|rep| measure_work(baseline, rep).ok()))
                .collect()
        };
        let semi = measure(SchemeKind::SemiImplicitMrt, order);
        let cf = measure(SchemeKind::CompoundFastMrt, None);
        let points: Vec<(usize, f64)> = semi.iter().map(|w| (w.multirate_factor, w.measured_speedup)).collect();
        let n_s1 = mean(&semi.iter().map(|w| w.model.n_s1).collect::<Vec<_>>()).unwrap_or(1.0);
        let c_instrumented = base.c();
        let c_fitted = (!points.is_empty()).then(|| fit_work_ratio(&points, base.n_fp, n_s1));
        let c = c_fitted.unwrap_or(c_instrumented);
        let c_p = mean(&cf.iter().map(|w| w.model.c_p()).collect::<Vec<_>>()).unwrap_or(c);
        let n_s2p = mean(&cf.iter().map(|w| w.model.n_s2_predictor).collect::<Vec<_>>()).unwrap_or(1.0);
        let model = WorkModel { n_s1, n_s2_predictor: n_s2p, w_g_predictor: c_p, ..WorkModel::with_ratio(c, base.n_fp) };
        let ms: BTreeSet<usize> = self
            .config
            .mesh
            .m
            .iter()
            .copied()
            .chain(semi.iter().chain(&cf).map(|w| w.multirate_factor))
            .collect();
        let find = |ws: &[WorkMeasurement], m: usize| ws.iter().find(|w| w.multirate_factor == m).map(|w| w.measured_speedup);
        let rows = ms
            .into_iter()
            .map(|m| SpeedupRow {
                m,
                modeled_semi: speedup_semi_implicit(&model, m),
                modeled_cf: speedup_compound_fast(&model, m),
                measured_semi: find(&semi, m),
                measured_cf: find(&cf, m),
            })
            .collect();
        Ok(SpeedupSummary { baseline: base, c_instrumented, c_fitted, n_s1, model, rows })
    }

    /// Activity numbers of the middle cell in the consistent initial state.
    pub fn initial_activity(&self) -> Option<ActivityNumbers> {
        let snap = self.reference()?.snapshots.first()?;
        let cells = self.system.cell_props(&snap.active, &snap.latent).ok()?;
        Some(activity_numbers(&cells[cells.len() / 2], self.system.material()))
    }
}

pub fn errors_csv(rows: &[ErrorRow]) -> String {
    let mut out = format!("{ERRORS_HEADER}\n");
    for r in rows {
        let p = r.p.map(|p| p.to_string()).unwrap_or_default();
        out += &format!(
            "{},{p},{},{},{},{},{}\n",
            r.scheme,
            r.m,
            r.field.name(),
            fmt_num(r.t),
            fmt_num(r.l2),
            fmt_opt(r.relative)
        );
    }
    out
}

pub fn speedup_csv(rows: &[SpeedupRow]) -> String {
    let mut out = format!("{SPEEDUP_HEADER}\n");
    for r in rows {
        out += &format!(
            "{},{},{},{},{}\n",
            r.m,
            fmt_num(r.modeled_semi),
            fmt_num(r.modeled_cf),
            fmt_opt(r.measured_semi),
            fmt_opt(r.measured_cf)
        );
    }
    out
}

/// What `compare` needs to find a run again: the report without its
/// snapshots, and the trajectory file beside it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub label: String,
    pub id: RunId,
    pub cells: usize,
    pub length: f64,
    pub trajectory: String,
    pub report: RunReport,
}

pub fn build_fingerprint() -> String {
    format!(
        "{} {} {}-{} {}",
        env!("CARGO_PKG_NAME"),
        env!("CARGO_PKG_VERSION"),
        std::env::consts::ARCH,
        std::env::consts::OS,
        if cfg!(debug_assertions) { "debug" } else { "release" }
    )
}

fn sha256_hex(text: &str) -> String {
    Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn manifest(sweep: &Sweep, notes: &[String], speedup: &Result<SpeedupSummary, String>) -> serde_json::Value {
    let runs: Vec<serde_json::Value> = sweep
        .records
        .iter()
        .map(|r| {
            let mut v = json!({
                "label": r.id.label(),
                "role": r.id.role,
                "scheme": r.id.scheme,
                "p": r.id.p,
                "m": r.id.m,
                "expected_failure": r.expected_failure,
            });
            match &r.outcome {
                Ok(rep) => {
                    v["status"] = json!("completed");
                    v["n_macro"] = json!(rep.n_macro);
                    v["counters"] = json!(rep.counters);
                    v["timing"] = json!(rep.timing);
                    v["warnings"] = json!(rep.warnings);
                }
                Err(f) => {
                    v["status"] = json!("failed");
                    v["error_class"] = json!(f.class);
                    v["error"] = json!(f.message);
                }
            }
            v
        })
        .collect();
    let sample = scheme_config(&sweep.config, &RunId { role: Role::Matrix, scheme: SchemeKind::SemiImplicitMrt, m: 1, p: None });
    json!({
        "config_hash": sweep.config.hash(),
        "build": build_fingerprint(),
        "system_fingerprint_sha256": sha256_hex(&mrt_core::PartitionedSystem::fingerprint(&sweep.system)),
        "seed": sweep.config.seed,
        "parameters": {
            "config": sweep.config,
            "newton_main": sample.newton_main,
            "newton_relaxed": sample.newton_relaxed,
            "fixed_point_tol": sample.fixed_point_tol,
            "fixed_point_max": sample.fixed_point_max,
            "h_min": sample.h_min,
        },
        "initial_activity": sweep.initial_activity(),
        "speedup": match speedup {
            Ok(s) => json!({ "c_instrumented": s.c_instrumented, "c_fitted": s.c_fitted, "n_s1": s.n_s1, "baseline": s.baseline, "model": s.model }),
            Err(e) => json!({ "unavailable": e }),
        },
        "all_runs_acceptable": sweep.all_acceptable(),
        "runs": runs,
        "notes": notes,
    })
}

/// Writes trajectories, run summaries, `errors.csv`, `speedup.csv` and `manifest.json`.
pub fn write_outputs(sweep: &Sweep, dir: &Path) -> io::Result<()> {
    fs::create_dir_all(dir)?;
    if sweep.config.output.trajectories {
        let runs = dir.join("runs");
        fs::create_dir_all(&runs)?;
        let grid = sweep.grid();
        for rec in &sweep.records {
            let Some(report) = rec.report() else { continue };
            let label = rec.id.label();
            let trajectory = format!("{label}.csv");
            fs::write(runs.join(&trajectory), trajectory_csv(report, grid))?;
            let summary = RunSummary {
                label: label.clone(),
                id: rec.id,
                cells: grid.cells,
                length: grid.length,
                trajectory,
                report: RunReport { snapshots: Vec::new(), ..report.clone() },
            };
            fs::write(runs.join(format!("{label}.json")), serde_json::to_string_pretty(&summary)?)?;
        }
    }
    let (rows, mut notes) = sweep.error_rows();
    fs::write(dir.join("errors.csv"), errors_csv(&rows))?;
    let speedup = sweep.speedup();
    match &speedup {
        Ok(s) => fs::write(dir.join("speedup.csv"), speedup_csv(&s.rows))?,
        Err(e) => notes.push(format!("speed-up table not written: {e}")),
    }
    let manifest = manifest(sweep, &notes, &speedup);
    fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)? + "\n")
}

/// Executes the configured sweep and writes every output file.
pub fn run_experiment(config: &ExperimentConfig, progress: &mut dyn FnMut(&RunRecord)) -> anyhow::Result<Sweep> {
    let sweep = execute(config, progress).map_err(anyhow::Error::msg)?;
    write_outputs(&sweep, &config.output.dir)?;
    Ok(sweep)
}
