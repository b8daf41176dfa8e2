//! Analysis pipeline and the schema-versioned report it produces.

use std::collections::BTreeMap;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::diagnostics::{self, DiagnosticsReport, NonexistenceThreshold};
use crate::error::{Error, Result};
use crate::index_theory::{self, ExistenceVerdict, IndexReport, StabilityVerdict, VerdictStatus};
use crate::model::{validate_structure, BoundaryCondition, Model, ModelConfig, SamplingBox, StructureReport};
use crate::pde_solver::{
    continuation_solve, newton_solve, random_smooth_seed, seed_from_mode, uniform_schedule, ContinuationOptions,
    DiscreteField, Grid, GridInfo, NewtonOptions, SolveResult, SolverMode,
};
use crate::steady_states::{self, ConstantStates, StateClass};

pub const SCHEMA_VERSION: u32 = 1;
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");
const STRUCTURE_SAMPLES: usize = 256;

pub mod exit {
    pub const OK: i32 = 0;
    pub const INPUT: i32 = 1;
    pub const INCONCLUSIVE: i32 = 2;
    pub const SOLVER: i32 = 3;
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum SeedSpec {
    Constant { values: Vec<f64> },
    Mode { k: usize, amplitude: f64 },
    Random { seed: u64 },
}

impl SeedSpec {
    pub fn describe(&self) -> String {
        match self {
            SeedSpec::Constant { values } => format!("constant {values:?}"),
            SeedSpec::Mode { k, amplitude } => format!("mode {k} amplitude {amplitude}"),
            SeedSpec::Random { seed } => format!("random {seed}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveSettings {
    pub grid_n: usize,
    pub tol: f64,
    pub sigma_steps: usize,
    pub homotopy: bool,
    pub seed: SeedSpec,
    /// BMO radius; defaults to a quarter of the diameter.
    pub radius: Option<f64>,
    pub picard: bool,
}

impl Default for SolveSettings {
    fn default() -> Self {
        SolveSettings {
            grid_n: 64,
            tol: crate::tol::NEWTON,
            sigma_steps: 10,
            homotopy: true,
            seed: SeedSpec::Random { seed: 0 },
            radius: None,
            picard: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SolveRecord {
    pub seed: String,
    pub grid: GridInfo,
    pub seed_warnings: Vec<String>,
    pub result: Option<SolveResult>,
    pub error: Option<String>,
    pub diagnostics: Option<DiagnosticsReport>,
}

impl SolveRecord {
    pub fn converged(&self) -> bool {
        self.result.as_ref().is_some_and(|r| r.converged)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AnalysisReport {
    pub schema_version: u32,
    pub tool_version: String,
    pub model: ModelConfig,
    pub structure: StructureReport,
    pub states: Option<ConstantStates>,
    pub stability: Vec<StabilityVerdict>,
    pub index_reports: Vec<IndexReport>,
    pub verdict: Option<ExistenceVerdict>,
    pub nonexistence: Option<NonexistenceThreshold>,
    pub notices: Vec<String>,
    pub solves: Vec<SolveRecord>,
    /// Wall-clock seconds per stage; only present on request since it breaks byte stability.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timings: Option<BTreeMap<String, f64>>,
}

struct Clock {
    enabled: bool,
    marks: BTreeMap<String, f64>,
}

impl Clock {
    fn time<T>(&mut self, stage: &str, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let out = f();
        if self.enabled {
            *self.marks.entry(stage.to_string()).or_insert(0.0) += start.elapsed().as_secs_f64();
        }
        out
    }
}

/// `[0, max(1, 2 max_state)]` in every component.
fn state_box(model: &Model, states: Option<&ConstantStates>) -> SamplingBox {
    let top = states
        .map(|s| {
            s.states
                .iter()
                .flat_map(|st| st.u_star.iter().copied())
                .fold(0.0f64, f64::max)
        })
        .unwrap_or(0.0);
    SamplingBox::uniform(model.m(), 0.0, (2.0 * top).max(1.0)).expect("nonempty box")
}

/// Structure check, states, stability, indices and verdict.
pub fn analyze(model: &Model, timings: bool) -> Result<AnalysisReport> {
    let mut clock = Clock {
        enabled: timings,
        marks: BTreeMap::new(),
    };
    let mut notices = Vec::new();
    let mut stability = Vec::new();
    let mut index_reports = Vec::new();
    let mut verdict = None;
    let states = if model.bc() == BoundaryCondition::Neumann {
        let analysis = clock.time("index", || index_theory::analyze_indices(model))?;
        stability = analysis.stability;
        index_reports = analysis
            .verdict
            .nontrivial_constant_indices
            .iter()
            .filter_map(|n| n.report.clone())
            .collect();
        verdict = Some(analysis.verdict);
        analysis.states
    } else {
        notices.push("index analysis needs Neumann boundary conditions; only constant states are enumerated".into());
        clock.time("states", || steady_states::find_constant_states(model))?
    };
    let sampling_box = state_box(model, Some(&states));
    let structure = clock.time("structure", || validate_structure(model, &sampling_box, STRUCTURE_SAMPLES))?;
    let nonexistence = clock.time("threshold", || {
        diagnostics::nonexistence_threshold(model, &sampling_box, STRUCTURE_SAMPLES)
    })?;
    if structure.lambda_floor > nonexistence.threshold {
        notices.push(format!(
            "diffusion floor {:.6e} exceeds the nonexistence threshold {:.6e} on the sampled box: only constant solutions with values in the box",
            structure.lambda_floor, nonexistence.threshold
        ));
    }
    Ok(AnalysisReport {
        schema_version: SCHEMA_VERSION,
        tool_version: TOOL_VERSION.to_string(),
        model: model.to_config(),
        structure,
        states: Some(states),
        stability,
        index_reports,
        verdict,
        nonexistence: Some(nonexistence),
        notices,
        solves: Vec::new(),
        timings: timings.then_some(clock.marks),
    })
}

/// State a seed is built around: the first nontrivial state, else the largest support.
fn reference_state(model: &Model, states: Option<&ConstantStates>) -> Vec<f64> {
    let states = match states {
        Some(s) => s,
        None => return vec![1.0; model.m()],
    };
    states
        .states
        .iter()
        .find(|s| s.classification == StateClass::Nontrivial)
        .or_else(|| states.states.iter().max_by_key(|s| s.support_indices().len()))
        .map(|s| s.u_star.clone())
        .filter(|u| u.iter().any(|v| *v > 0.0))
        .unwrap_or_else(|| vec![1.0; model.m()])
}

pub fn build_seed(model: &Model, grid: &Grid, spec: &SeedSpec, states: Option<&ConstantStates>) -> Result<(DiscreteField, Vec<String>)> {
    match spec {
        SeedSpec::Constant { values } => {
            if values.len() != model.m() {
                return Err(Error::Shape(format!("constant seed has {} values, expected {}", values.len(), model.m())));
            }
            if values.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidInput("seed values must be finite".into()));
            }
            Ok((DiscreteField::constant(grid.clone(), values), Vec::new()))
        }
        SeedSpec::Mode { k, amplitude } => {
            let u_star = states
                .and_then(|s| s.states.iter().find(|st| st.classification == StateClass::Nontrivial))
                .map(|s| s.u_star.clone())
                .ok_or_else(|| Error::InvalidInput("mode seeds need a nontrivial constant state".into()))?;
            let decision = index_theory::mode_decision(model, &u_star, *k)?;
            let seed = seed_from_mode(model, grid, &u_star, &decision, *amplitude)?;
            Ok((seed.field, seed.warnings))
        }
        SeedSpec::Random { seed } => {
            let center = reference_state(model, states);
            Ok((random_smooth_seed(grid, &center, 0.5, *seed)?, Vec::new()))
        }
    }
}

/// Checks flags that must be rejected before any work is done.
pub fn validate_settings(model: &Model, settings: &SolveSettings) -> Result<Grid> {
    let grid = Grid::new(*model.domain(), settings.grid_n)?;
    if !(settings.tol > 0.0) {
        return Err(Error::InvalidInput(format!("tol must be positive, got {}", settings.tol)));
    }
    if let Some(r) = settings.radius {
        diagnostics::bmo_radii(&grid, r)?;
    }
    if let SeedSpec::Constant { values } = &settings.seed {
        if values.len() != model.m() {
            return Err(Error::Shape(format!("constant seed has {} values, expected {}", values.len(), model.m())));
        }
    }
    Ok(grid)
}

/// One solve plus diagnostics. Solver failures are recorded, not returned.
pub fn run_solve(
    model: &Model,
    settings: &SolveSettings,
    states: Option<&ConstantStates>,
    lambda_sup: Option<f64>,
) -> Result<(SolveRecord, Option<DiscreteField>)> {
    let grid = validate_settings(model, settings)?;
    let (seed, seed_warnings) = build_seed(model, &grid, &settings.seed, states)?;
    let newton = NewtonOptions {
        tol: settings.tol,
        mode: if settings.picard { SolverMode::Picard } else { SolverMode::Newton },
        max_iter: if settings.picard { 5000 } else { 100 },
        ..Default::default()
    };
    let outcome = if settings.homotopy {
        let opts = ContinuationOptions {
            newton,
            ..Default::default()
        };
        continuation_solve(model, &grid, &seed, &uniform_schedule(settings.sigma_steps), &opts)
    } else {
        newton_solve(model, &grid, &seed, &newton)
    };
    let mut record = SolveRecord {
        seed: settings.seed.describe(),
        grid: grid.info(),
        seed_warnings,
        result: None,
        error: None,
        diagnostics: None,
    };
    match outcome {
        Ok(result) => {
            let radius = settings.radius.unwrap_or_else(|| diagnostics::default_radius(&grid));
            record.diagnostics = Some(diagnostics::diagnose(model, &result.field, radius, lambda_sup)?);
            let field = result.field.clone();
            record.result = Some(result);
            Ok((record, Some(field)))
        }
        Err(e) => {
            record.error = Some(e.to_string());
            Ok((record, None))
        }
    }
}

/// Analysis followed by one solve.
pub fn analyze_and_solve(model: &Model, settings: &SolveSettings, timings: bool) -> Result<(AnalysisReport, Option<DiscreteField>)> {
    validate_settings(model, settings)?;
    let mut report = analyze(model, timings)?;
    let start = Instant::now();
    let lambda_sup = report.structure.lambda_sup;
    let (record, field) = run_solve(model, settings, report.states.as_ref(), lambda_sup)?;
    if let Some(t) = report.timings.as_mut() {
        t.insert("solve".into(), start.elapsed().as_secs_f64());
    }
    report.solves.push(record);
    Ok((report, field))
}

pub fn analyze_exit_code(report: &AnalysisReport) -> i32 {
    match &report.verdict {
        Some(v) if v.status == VerdictStatus::Inconclusive => exit::INCONCLUSIVE,
        _ => exit::OK,
    }
}

pub fn solve_exit_code(report: &AnalysisReport) -> i32 {
    if !report.solves.is_empty() && report.solves.iter().all(SolveRecord::converged) {
        exit::OK
    } else {
        exit::SOLVER
    }
}

pub fn to_json(report: &AnalysisReport) -> String {
    let mut text = serde_json::to_string_pretty(report).expect("report serializes");
    text.push('\n');
    text
}

/// One-line verdict summary for standard output.
pub fn summary(report: &AnalysisReport) -> String {
    let mut lines = Vec::new();
    match &report.verdict {
        Some(v) => {
            lines.push(format!("verdict: {}", v.statement));
            lines.push(format!(
                "boundary index sum: {}  total: {}  case: {}",
                opt(v.sum_of_boundary_indices),
                opt(v.total),
                v.case_label.as_deref().unwrap_or("-")
            ));
        }
        None => lines.push("verdict: not computed".into()),
    }
    for n in &report.notices {
        lines.push(format!("notice: {n}"));
    }
    for s in &report.solves {
        match (&s.result, &s.error) {
            (Some(r), _) => lines.push(format!(
                "solve [{}]: {:?} grad_l2 = {:.6e} residual = {:.3e}",
                s.seed, r.classification, r.grad_l2, r.residual_norm
            )),
            (None, Some(e)) => lines.push(format!("solve [{}]: failed: {e}", s.seed)),
            _ => {}
        }
    }
    lines.join("\n")
}

fn opt(v: Option<i32>) -> String {
    v.map_or_else(|| "-".to_string(), |x| x.to_string())
}

/// Sets one numeric entry of a configuration, addressed as `d.0`, `alpha.0.1`,
/// `r.1`, `c.1.0` or `length.0` (indices are zero based).
pub fn apply_param(config: &ModelConfig, name: &str, value: f64) -> Result<ModelConfig> {
    let mut out = config.clone();
    let parts: Vec<&str> = name.split('.').collect();
    let idx = |k: usize| -> Result<usize> {
        parts
            .get(k)
            .ok_or_else(|| Error::InvalidInput(format!("parameter {name} needs more indices")))?
            .parse::<usize>()
            .map_err(|_| Error::InvalidInput(format!("bad index in parameter {name}")))
    };
    let bad = || Error::InvalidInput(format!("parameter {name} out of range"));
    let arity = match parts[0] {
        "d" | "r" | "length" => 2,
        "alpha" | "c" => 3,
        _ => return Err(Error::InvalidInput(format!("unknown parameter {name}"))),
    };
    if parts.len() != arity {
        return Err(Error::InvalidInput(format!("parameter {name} needs {} indices", arity - 1)));
    }
    let slot = match parts[0] {
        "d" => out.d.get_mut(idx(1)?),
        "r" => out.r.get_mut(idx(1)?),
        "length" => out.domain.lengths.get_mut(idx(1)?),
        "alpha" => {
            let (i, j) = (idx(1)?, idx(2)?);
            out.alpha.get_mut(i).and_then(|row| row.get_mut(j))
        }
        _ => {
            let (i, j) = (idx(1)?, idx(2)?);
            out.c.get_mut(i).and_then(|row| row.get_mut(j))
        }
    };
    *slot.ok_or_else(bad)? = value;
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub parameter: String,
    pub value: f64,
    pub status: String,
    pub boundary_sum: Option<i32>,
    pub total: Option<i32>,
    pub predicts_nonconstant: Option<bool>,
    pub classification: Option<String>,
    pub grad_l2: Option<f64>,
    pub residual_norm: Option<f64>,
    pub error: Option<String>,
}

pub const SWEEP_HEADER: &str =
    "parameter,value,status,boundary_sum,total,predicts_nonconstant,classification,grad_l2,residual_norm,error";

impl SweepRow {
    pub fn to_csv(&self) -> String {
        let o = |v: Option<String>| v.unwrap_or_default();
        format!(
            "{},{:e},{},{},{},{},{},{},{},{}",
            self.parameter,
            self.value,
            self.status,
            o(self.boundary_sum.map(|v| v.to_string())),
            o(self.total.map(|v| v.to_string())),
            o(self.predicts_nonconstant.map(|v| v.to_string())),
            o(self.classification.clone()),
            o(self.grad_l2.map(|v| format!("{v:e}"))),
            o(self.residual_norm.map(|v| format!("{v:e}"))),
            o(self.error.as_ref().map(|e| format!("\"{}\"", e.replace('"', "'")))),
        )
    }
}

/// One sweep point: analysis and, when settings are given, a solve.
pub fn sweep_point(config: &ModelConfig, name: &str, value: f64, settings: Option<&SolveSettings>) -> SweepRow {
    let mut row = SweepRow {
        parameter: name.to_string(),
        value,
        status: "error".into(),
        boundary_sum: None,
        total: None,
        predicts_nonconstant: None,
        classification: None,
        grad_l2: None,
        residual_norm: None,
        error: None,
    };
    let model = match apply_param(config, name, value).and_then(|c| crate::model::build_model(&c)) {
        Ok(m) => m,
        Err(e) => {
            row.error = Some(e.to_string());
            return row;
        }
    };
    let report = match settings {
        Some(s) => analyze_and_solve(&model, s, false).map(|(r, _)| r),
        None => analyze(&model, false),
    };
    match report {
        Ok(report) => {
            if let Some(v) = &report.verdict {
                row.status = serde_json::to_value(v.status)
                    .ok()
                    .and_then(|s| s.as_str().map(str::to_string))
                    .unwrap_or_default();
                row.boundary_sum = v.sum_of_boundary_indices;
                row.total = v.total;
                row.predicts_nonconstant = v.predicts_nonconstant;
            } else {
                row.status = "states-only".into();
            }
            if let Some(s) = report.solves.first() {
                if let Some(r) = &s.result {
                    row.classification = serde_json::to_value(r.classification)
                        .ok()
                        .and_then(|c| c.as_str().map(str::to_string));
                    row.grad_l2 = Some(r.grad_l2);
                    row.residual_norm = Some(r.residual_norm);
                }
                row.error = s.error.clone();
            }
        }
        Err(e) => row.error = Some(e.to_string()),
    }
    row
}

/// `start:stop:count` with `count >= 1` evenly spaced values.
pub fn parse_range(spec: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    let bad = || Error::InvalidInput(format!("range {spec} must be start:stop:count"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let start: f64 = parts[0].trim().parse().map_err(|_| bad())?;
    let stop: f64 = parts[1].trim().parse().map_err(|_| bad())?;
    let count: usize = parts[2].trim().parse().map_err(|_| bad())?;
    if count == 0 || !start.is_finite() || !stop.is_finite() {
        return Err(bad());
    }
    if count == 1 {
        return Ok(vec![start]);
    }
    Ok((0..count)
        .map(|k| start + (stop - start) * k as f64 / (count - 1) as f64)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_model, DomainConfig, DomainKind};

    fn weak_competition() -> ModelConfig {
        ModelConfig {
            m: 2,
            d: vec![1.0, 1.0],
            alpha: vec![vec![0.0; 2]; 2],
            r: vec![1.0, 1.0],
            c: vec![vec![1.0, 0.5], vec![0.3, 1.0]],
            domain: DomainConfig {
                kind: DomainKind::Interval,
                lengths: vec![std::f64::consts::PI],
            },
            bc: BoundaryCondition::Neumann,
        }
    }

    #[test]
    fn analyze_weak_competition() {
        let model = build_model(&weak_competition()).unwrap();
        let report = analyze(&model, false).unwrap();
        let v = report.verdict.as_ref().unwrap();
        assert!(v.statement.contains("nontrivial positive solution exists (case a)"), "{}", v.statement);
        assert_eq!(analyze_exit_code(&report), exit::OK);
        assert!(report.timings.is_none());
        assert_eq!(to_json(&report), to_json(&analyze(&model, false).unwrap()));
    }

    #[test]
    fn dirichlet_degrades_to_states() {
        let mut cfg = weak_competition();
        cfg.bc = BoundaryCondition::Dirichlet;
        let report = analyze(&build_model(&cfg).unwrap(), false).unwrap();
        assert!(report.verdict.is_none());
        assert!(report.notices[0].contains("Neumann"));
        assert_eq!(report.states.unwrap().states.len(), 4);
    }

    #[test]
    fn params_and_ranges() {
        let cfg = weak_competition();
        assert_eq!(apply_param(&cfg, "c.0.1", 0.5).unwrap().c[0][1], 0.5);
        assert_eq!(apply_param(&cfg, "length.0", 2.0).unwrap().domain.lengths[0], 2.0);
        assert!(apply_param(&cfg, "c.2.0", 1.0).is_err());
        assert!(apply_param(&cfg, "q.0", 1.0).is_err());
        assert!(apply_param(&cfg, "d.0.1", 1.0).is_err());
        assert_eq!(parse_range("0:1:3").unwrap(), vec![0.0, 0.5, 1.0]);
        assert!(parse_range("0:1").is_err());
        assert!(parse_range("0:1:0").is_err());
    }

    #[test]
    fn constant_seed_solve() {
        let model = build_model(&weak_competition()).unwrap();
        let settings = SolveSettings {
            grid_n: 16,
            seed: SeedSpec::Constant { values: vec![0.6, 0.8] },
            ..Default::default()
        };
        let (report, field) = analyze_and_solve(&model, &settings, false).unwrap();
        assert!(field.is_some());
        assert_eq!(solve_exit_code(&report), exit::OK);
        let r = report.solves[0].result.as_ref().unwrap();
        assert!(r.classification.is_constant());
        assert!((r.field.node(3)[0] - 10.0 / 17.0).abs() < 1e-8);
    }

    #[test]
    fn coarse_grid_rejected() {
        let model = build_model(&weak_competition()).unwrap();
        let settings = SolveSettings {
            grid_n: 4,
            ..Default::default()
        };
        let err = analyze_and_solve(&model, &settings, false).unwrap_err();
        assert!(err.to_string().contains("grid too coarse"));
    }
}
