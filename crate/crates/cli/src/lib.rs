//! Command implementations behind the `gpumix` binary.
//!
//! Each `cmd_*` function resolves a [`ScenarioSpec`], calls into the
//! `gpumix` library and returns a serializable report. Rendering and exit
//! codes live in `main.rs`.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use gpumix::allocator::{AllocationReport, GpuCount};
use gpumix::simulator::{Arrival, SimSummary, WorkloadSource};
use gpumix::workload::{read_trace, PRESETS};
use gpumix::{
    build_histogram, formulate, load_matrix, savings, scale_rate, slice_workload, solve_exact_with,
    solve_single_type, synth_profile, Allocation, BucketGrid, Error, GpuRegistry, IlpInstance,
    ModelParams, Result, SimConfig, SolverOptions, ThroughputProfile, WorkloadHistogram,
};
use serde::{Deserialize, Serialize};

pub const DEFAULT_SLICE_FACTOR: u32 = 8;
pub const DEFAULT_MODEL: &str = "llama2-7b";
pub const DEFAULT_TIME_BUDGET_S: f64 = 60.0;

/// Where request sizes come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WorkloadSpec {
    Preset { name: String },
    Histogram { path: PathBuf },
    Trace { path: PathBuf },
}

impl WorkloadSpec {
    /// Parses `short`, `hist:PATH`, `trace:PATH`, or a bare path (`.csv` is a
    /// trace, anything else a histogram).
    pub fn parse(text: &str) -> Result<Self> {
        if let Some(path) = text.strip_prefix("hist:") {
            return Ok(Self::Histogram { path: path.into() });
        }
        if let Some(path) = text.strip_prefix("trace:") {
            return Ok(Self::Trace { path: path.into() });
        }
        if PRESETS.contains(&text) {
            return Ok(Self::Preset { name: text.into() });
        }
        let path = PathBuf::from(text);
        match path.extension().and_then(|e| e.to_str()) {
            Some("csv") => Ok(Self::Trace { path }),
            Some(_) => Ok(Self::Histogram { path }),
            None => Err(Error::InvalidInput(format!(
                "unknown workload {text:?}: expected a preset {PRESETS:?}, a .json histogram or a .csv trace"
            ))),
        }
    }

    pub fn label(&self) -> String {
        match self {
            Self::Preset { name } => name.clone(),
            Self::Histogram { path } | Self::Trace { path } => path.display().to_string(),
        }
    }
}

/// Everything needed to reproduce a planning run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub workload: WorkloadSpec,
    /// Expected request rate, req/s.
    pub total_rate: f64,
    pub slo_tpot_ms: f64,
    /// GPU registry file; the built-in four-GPU fleet when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gpus: Option<PathBuf>,
    /// Measured profiles to use instead of synthesized ones.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub profiles: Vec<PathBuf>,
    #[serde(default = "default_slice_factor")]
    pub slice_factor: u32,
    #[serde(default = "default_over_provision")]
    pub over_provision: f64,
    #[serde(default = "default_model")]
    pub model: String,
    #[serde(default = "default_time_budget")]
    pub time_budget_s: f64,
}

fn default_slice_factor() -> u32 {
    DEFAULT_SLICE_FACTOR
}

fn default_over_provision() -> f64 {
    1.0
}

fn default_model() -> String {
    DEFAULT_MODEL.into()
}

fn default_time_budget() -> f64 {
    DEFAULT_TIME_BUDGET_S
}

impl ScenarioSpec {
    pub fn new(workload: WorkloadSpec, total_rate: f64, slo_tpot_ms: f64) -> Self {
        Self {
            workload,
            total_rate,
            slo_tpot_ms,
            gpus: None,
            profiles: Vec::new(),
            slice_factor: DEFAULT_SLICE_FACTOR,
            over_provision: 1.0,
            model: DEFAULT_MODEL.into(),
            time_budget_s: DEFAULT_TIME_BUDGET_S,
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let spec: Self = serde_json::from_str(&std::fs::read_to_string(path)?)
            .map_err(|e| Error::Schema(format!("scenario: {e}")))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.total_rate > 0.0 && self.total_rate.is_finite()) {
            return Err(Error::InvalidInput("rate must be positive".into()));
        }
        if !(self.slo_tpot_ms > 0.0 && self.slo_tpot_ms.is_finite()) {
            return Err(Error::InvalidInput("SLO must be positive".into()));
        }
        if self.slice_factor < 1 {
            return Err(Error::InvalidInput("slice factor must be at least 1".into()));
        }
        if !(self.over_provision >= 1.0 && self.over_provision.is_finite()) {
            return Err(Error::InvalidInput(
                "over-provision factor must be at least 1.0".into(),
            ));
        }
        if !(self.time_budget_s > 0.0 && self.time_budget_s.is_finite()) {
            return Err(Error::InvalidInput("time budget must be positive".into()));
        }
        Ok(())
    }

    pub fn with_rate(&self, total_rate: f64) -> Self {
        Self {
            total_rate,
            ..self.clone()
        }
    }

    /// The workload histogram at the expected rate.
    pub fn histogram(&self) -> Result<WorkloadHistogram> {
        self.validate()?;
        match &self.workload {
            WorkloadSpec::Preset { name } => gpumix::workload::preset(name, self.total_rate),
            WorkloadSpec::Histogram { path } => {
                let hist = WorkloadHistogram::load(path)?;
                if hist.total_rate() == 0.0 {
                    return Ok(hist);
                }
                scale_rate(&hist, self.total_rate / hist.total_rate())
            }
            WorkloadSpec::Trace { path } => {
                build_histogram(&read_trace(path)?, &BucketGrid::default(), self.total_rate)
            }
        }
    }

    pub fn model_params(&self) -> Result<ModelParams> {
        ModelParams::preset(&self.model)
    }

    pub fn registry(&self) -> Result<GpuRegistry> {
        match &self.gpus {
            Some(path) => GpuRegistry::load(path),
            None => Ok(GpuRegistry::default()),
        }
    }

    /// Imported profiles if any were given, otherwise synthesized ones for
    /// every registry GPU on `grid`.
    pub fn profiles(&self, grid: &BucketGrid) -> Result<Vec<ThroughputProfile>> {
        if !self.profiles.is_empty() {
            let profiles = self
                .profiles
                .iter()
                .map(gpumix::import_profile)
                .collect::<Result<Vec<_>>>()?;
            for p in &profiles {
                if p.slo_tpot_ms != self.slo_tpot_ms {
                    return Err(Error::GridMismatch(format!(
                        "profile for {} is at SLO {} ms, scenario asks for {} ms",
                        p.gpu.name, p.slo_tpot_ms, self.slo_tpot_ms
                    )));
                }
            }
            return Ok(profiles);
        }
        let model = self.model_params()?;
        self.registry()?
            .gpus
            .iter()
            .map(|gpu| synth_profile(gpu, &model, grid, self.slo_tpot_ms))
            .collect()
    }

    /// The integer program at the over-provisioned rate.
    pub fn instance(&self) -> Result<IlpInstance> {
        let hist = self.histogram()?;
        let hist = if hist.total_rate() > 0.0 {
            scale_rate(&hist, self.over_provision)?
        } else {
            hist
        };
        let profiles = self.profiles(hist.grid())?;
        let slices = slice_workload(&hist, self.slice_factor)?;
        let loads = load_matrix(&slices, &profiles)?;
        let costs: Vec<f64> = profiles.iter().map(|p| p.gpu.hourly_cost).collect();
        formulate(&slices, &loads, &costs)
    }

    pub fn solver_options(&self) -> SolverOptions {
        SolverOptions {
            time_budget: Duration::from_secs_f64(self.time_budget_s),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanReport {
    pub scenario: ScenarioSpec,
    /// Rate the allocation was sized for (expected rate times over-provision).
    pub solved_rate: f64,
    pub n_slices: usize,
    pub allocation: AllocationReport,
    /// Excluded from JSON so repeated runs are byte-identical.
    #[serde(skip)]
    pub wall_time_s: f64,
}

pub fn cmd_plan(spec: &ScenarioSpec) -> Result<PlanReport> {
    let instance = spec.instance()?;
    let start = Instant::now();
    let alloc = solve_exact_with(&instance, &spec.solver_options())?;
    let wall_time_s = start.elapsed().as_secs_f64();
    Ok(PlanReport {
        scenario: spec.clone(),
        solved_rate: spec.total_rate * spec.over_provision,
        n_slices: instance.n_slices(),
        allocation: alloc.report(&instance),
        wall_time_s,
    })
}

impl PlanReport {
    pub fn render(&self) -> String {
        let mut out = String::new();
        let s = &self.scenario;
        let _ = writeln!(
            out,
            "workload {} at {} req/s (sized for {:.4} req/s), SLO {} ms, {} slices",
            s.workload.label(),
            s.total_rate,
            self.solved_rate,
            s.slo_tpot_ms,
            self.n_slices
        );
        out.push_str(&render_counts(&self.allocation.counts));
        let _ = writeln!(
            out,
            "total cost {:.3} $/hr{}",
            self.allocation.total_cost,
            if self.allocation.proven_optimal { " (optimal)" } else { "" }
        );
        let _ = writeln!(
            out,
            "solver time {:.3} s, {} nodes",
            self.wall_time_s, self.allocation.nodes
        );
        out
    }
}

fn render_counts(counts: &[GpuCount]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{:<10} {:>6} {:>10}", "gpu", "count", "$/hr each");
    for c in counts {
        let _ = writeln!(out, "{:<10} {:>6} {:>10.3}", c.gpu, c.count, c.hourly_cost);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Saving {
    pub baseline: String,
    pub percent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub label: String,
    /// Empty when the row is infeasible.
    pub counts: Vec<GpuCount>,
    pub total_cost: Option<f64>,
    /// Why the row has no allocation.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
    /// Savings of this row relative to every feasible baseline row.
    pub savings: Vec<Saving>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub total_rate: f64,
    pub slo_tpot_ms: f64,
    /// Single-type baselines first, the mixed allocation last.
    pub rows: Vec<ComparisonRow>,
    #[serde(skip)]
    pub wall_time_s: f64,
}

pub const MIXED_LABEL: &str = "mixed";

fn row_for(label: String, instance: &IlpInstance, alloc: &Allocation) -> ComparisonRow {
    ComparisonRow {
        label,
        counts: alloc.report(instance).counts,
        total_cost: Some(alloc.total_cost),
        note: None,
        savings: Vec::new(),
    }
}

pub fn cmd_compare(spec: &ScenarioSpec) -> Result<ComparisonReport> {
    let instance = spec.instance()?;
    let mut rows = Vec::new();
    for (j, name) in instance.gpu_names().iter().enumerate() {
        let label = format!("{name}-only");
        rows.push(match solve_single_type(&instance, j) {
            Ok(alloc) => row_for(label, &instance, &alloc),
            Err(e @ Error::BaselineInfeasible { .. }) => ComparisonRow {
                label,
                counts: Vec::new(),
                total_cost: None,
                note: Some(format!("infeasible: {e}")),
                savings: Vec::new(),
            },
            Err(e) => return Err(e),
        });
    }
    let start = Instant::now();
    let mixed = solve_exact_with(&instance, &spec.solver_options())?;
    let wall_time_s = start.elapsed().as_secs_f64();
    rows.push(row_for(MIXED_LABEL.into(), &instance, &mixed));

    let baselines: Vec<(String, f64)> = rows
        .iter()
        .filter(|r| r.label != MIXED_LABEL)
        .filter_map(|r| r.total_cost.map(|c| (r.label.clone(), c)))
        .filter(|&(_, c)| c > 0.0)
        .collect();
    for row in &mut rows {
        let Some(cost) = row.total_cost else { continue };
        for (baseline, base_cost) in &baselines {
            row.savings.push(Saving {
                baseline: baseline.clone(),
                percent: savings(cost, *base_cost)?,
            });
        }
    }
    Ok(ComparisonReport {
        total_rate: spec.total_rate,
        slo_tpot_ms: spec.slo_tpot_ms,
        rows,
        wall_time_s,
    })
}

impl ComparisonReport {
    pub fn mixed(&self) -> &ComparisonRow {
        self.rows.last().expect("the mixed row is always present")
    }

    pub fn row(&self, label: &str) -> Option<&ComparisonRow> {
        self.rows.iter().find(|r| r.label == label)
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "rate {} req/s, SLO {} ms",
            self.total_rate, self.slo_tpot_ms
        );
        let gpus: Vec<String> = self
            .mixed()
            .counts
            .iter()
            .map(|c| c.gpu.clone())
            .collect();
        let _ = write!(out, "{:<12}", "allocator");
        for g in &gpus {
            let _ = write!(out, " {g:>6}");
        }
        let _ = writeln!(out, " {:>10}  savings", "$/hr");
        for row in &self.rows {
            let _ = write!(out, "{:<12}", row.label);
            match row.total_cost {
                Some(cost) => {
                    for c in &row.counts {
                        let _ = write!(out, " {:>6}", c.count);
                    }
                    let _ = write!(out, " {cost:>10.3} ");
                    for s in &row.savings {
                        let _ = write!(out, " {:.2}% vs {}", s.percent, s.baseline);
                    }
                }
                None => {
                    for _ in &gpus {
                        let _ = write!(out, " {:>6}", "-");
                    }
                    let _ = write!(out, " {:>10}  {}", "-", row.note.as_deref().unwrap_or(""));
                }
            }
            let _ = writeln!(out);
        }
        let _ = writeln!(out, "solver time {:.3} s", self.wall_time_s);
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepBlock {
    pub rate: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report: Option<ComparisonReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// One row of the normalized-cost table: every allocator's cost divided by
/// the mixed cost at that rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizedRow {
    pub rate: f64,
    /// `(label, normalized cost)`; `None` marks an infeasible baseline.
    pub costs: Vec<(String, Option<f64>)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub blocks: Vec<SweepBlock>,
    pub normalized: Vec<NormalizedRow>,
}

/// Solves every rate on its own thread; each solve is deterministic, so the
/// report does not depend on scheduling.
pub fn cmd_sweep(spec: &ScenarioSpec, rates: &[f64]) -> Result<SweepReport> {
    if rates.is_empty() {
        return Err(Error::InvalidInput("at least one rate is required".into()));
    }
    if rates.iter().any(|r| !(*r > 0.0 && r.is_finite())) {
        return Err(Error::InvalidInput("rates must be positive".into()));
    }
    if rates.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidInput("rates must be strictly ascending".into()));
    }
    let results: Vec<Result<ComparisonReport>> = std::thread::scope(|scope| {
        let handles: Vec<_> = rates
            .iter()
            .map(|&rate| scope.spawn(move || cmd_compare(&spec.with_rate(rate))))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("sweep worker panicked"))
            .collect()
    });
    let mut blocks = Vec::new();
    let mut normalized = Vec::new();
    for (&rate, result) in rates.iter().zip(results) {
        match result {
            Ok(report) => {
                let mixed = report.mixed().total_cost.filter(|&c| c > 0.0);
                normalized.push(NormalizedRow {
                    rate,
                    costs: report
                        .rows
                        .iter()
                        .map(|r| {
                            let norm = match (r.total_cost, mixed) {
                                (Some(c), Some(m)) => Some(c / m),
                                _ => None,
                            };
                            (r.label.clone(), norm)
                        })
                        .collect(),
                });
                blocks.push(SweepBlock {
                    rate,
                    report: Some(report),
                    error: None,
                });
            }
            Err(e) => blocks.push(SweepBlock {
                rate,
                report: None,
                error: Some(e.to_string()),
            }),
        }
    }
    Ok(SweepReport { blocks, normalized })
}

impl SweepReport {
    pub fn render(&self) -> String {
        let mut out = String::new();
        for block in &self.blocks {
            match (&block.report, &block.error) {
                (Some(report), _) => out.push_str(&report.render()),
                (None, Some(e)) => {
                    let _ = writeln!(out, "rate {} req/s failed: {e}", block.rate);
                }
                (None, None) => {}
            }
            out.push('\n');
        }
        let _ = writeln!(out, "cost normalized to the mixed allocation");
        for row in &self.normalized {
            let _ = write!(out, "rate {:>8}", row.rate);
            for (label, norm) in &row.costs {
                match norm {
                    Some(v) => {
                        let _ = write!(out, "  {label} {v:.3}");
                    }
                    None => {
                        let _ = write!(out, "  {label} n/a");
                    }
                }
            }
            let _ = writeln!(out);
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulateOptions {
    /// A plan report to provision; the scenario is planned first when absent.
    pub allocation: Option<PathBuf>,
    pub seed: u64,
    pub n_requests: usize,
    /// Replay a trace's recorded arrival times instead of Poisson arrivals.
    pub replay: bool,
    pub cdf_out: Option<PathBuf>,
    pub requests_out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulateReport {
    pub counts: Vec<GpuCount>,
    pub seed: u64,
    pub summary: SimSummary,
}

/// Builds an allocation with the given counts; the simulator needs no slice
/// assignment.
fn allocation_from_counts(counts: &[GpuCount]) -> Allocation {
    let mut alloc = Allocation::empty(counts.iter().map(|c| c.gpu.clone()).collect());
    alloc.counts = counts.iter().map(|c| c.count).collect();
    alloc
}

pub fn cmd_simulate(spec: &ScenarioSpec, options: &SimulateOptions) -> Result<SimulateReport> {
    let counts = match &options.allocation {
        Some(path) => {
            let plan: PlanReport = serde_json::from_str(&std::fs::read_to_string(path)?)
                .map_err(|e| Error::Schema(format!("plan file: {e}")))?;
            plan.allocation.counts
        }
        None => cmd_plan(spec)?.allocation.counts,
    };
    let alloc = allocation_from_counts(&counts);
    let (workload, arrival) = match &spec.workload {
        WorkloadSpec::Trace { path } => {
            let records = read_trace(path)?;
            let arrival = if options.replay {
                Arrival::TraceReplay
            } else {
                Arrival::Poisson {
                    rate: spec.total_rate,
                }
            };
            (WorkloadSource::Trace(records), arrival)
        }
        _ if options.replay => {
            return Err(Error::InvalidInput(
                "--replay needs a trace workload with arrival times".into(),
            ))
        }
        _ => (
            WorkloadSource::Histogram(spec.histogram()?),
            Arrival::Poisson {
                rate: spec.total_rate,
            },
        ),
    };
    let profiles = spec.profiles(&BucketGrid::default())?;
    let config = SimConfig {
        allocation: alloc,
        profiles,
        model: spec.model_params()?,
        workload,
        arrival,
        n_requests: options.n_requests,
        seed: options.seed,
        slo_tpot_ms: spec.slo_tpot_ms,
    };
    let result = gpumix::run(&config)?;
    if let Some(path) = &options.cdf_out {
        result.write_cdf_csv(std::fs::File::create(path)?)?;
    }
    if let Some(path) = &options.requests_out {
        result.write_requests_csv(std::fs::File::create(path)?)?;
    }
    Ok(SimulateReport {
        counts,
        seed: options.seed,
        summary: result.summary(),
    })
}

impl SimulateReport {
    pub fn render(&self) -> String {
        let s = &self.summary;
        let ms = |v: Option<f64>| v.map_or("n/a".to_string(), |v| format!("{v:.2} ms"));
        let mut out = render_counts(&self.counts);
        let _ = writeln!(
            out,
            "requests {} (completed {}, dropped {}), seed {}",
            s.n_requests, s.completed, s.dropped, self.seed
        );
        let _ = writeln!(
            out,
            "SLO {} ms attainment {:.4}",
            s.slo_tpot_ms, s.attainment
        );
        let _ = writeln!(
            out,
            "TPOT p50 {}, p99 {}, mean {}; TTFT p50 {}",
            ms(s.tpot_p50_ms),
            ms(s.tpot_p99_ms),
            ms(s.tpot_mean_ms),
            ms(s.ttft_p50_ms)
        );
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileSummary {
    pub gpu: String,
    pub slo_tpot_ms: f64,
    pub hourly_cost: f64,
    pub feasible_buckets: usize,
    pub model_fits: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
}

impl ProfileSummary {
    fn of(profile: &ThroughputProfile, path: Option<PathBuf>) -> Self {
        Self {
            gpu: profile.gpu.name.clone(),
            slo_tpot_ms: profile.slo_tpot_ms,
            hourly_cost: profile.gpu.hourly_cost,
            feasible_buckets: profile.feasible_buckets(),
            model_fits: profile.model_fits,
            path,
        }
    }
}

/// File name used for a generated profile, e.g. `A10G-120ms.json`.
pub fn profile_file_name(gpu: &str, slo_tpot_ms: f64) -> String {
    format!("{gpu}-{slo_tpot_ms}ms.json")
}

/// Synthesizes one profile per registry GPU; writes them into `out_dir`
/// when given.
pub fn cmd_profile_gen(
    registry: &GpuRegistry,
    model: &ModelParams,
    slo_tpot_ms: f64,
    out_dir: Option<&Path>,
) -> Result<Vec<ProfileSummary>> {
    let grid = BucketGrid::default();
    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir)?;
    }
    registry
        .gpus
        .iter()
        .map(|gpu| {
            let profile = synth_profile(gpu, model, &grid, slo_tpot_ms)?;
            let path = match out_dir {
                Some(dir) => {
                    let path = dir.join(profile_file_name(&gpu.name, slo_tpot_ms));
                    profile.save(&path)?;
                    Some(path)
                }
                None => None,
            };
            Ok(ProfileSummary::of(&profile, path))
        })
        .collect()
}

/// Validates measured profile files.
pub fn cmd_profile_import(paths: &[PathBuf]) -> Result<Vec<ProfileSummary>> {
    paths
        .iter()
        .map(|p| Ok(ProfileSummary::of(&gpumix::import_profile(p)?, Some(p.clone()))))
        .collect()
}

pub fn render_profiles(summaries: &[ProfileSummary]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<10} {:>8} {:>10} {:>9}  file",
        "gpu", "SLO ms", "$/hr", "buckets"
    );
    for s in summaries {
        let _ = writeln!(
            out,
            "{:<10} {:>8} {:>10.3} {:>9}  {}",
            s.gpu,
            s.slo_tpot_ms,
            s.hourly_cost,
            s.feasible_buckets,
            s.path.as_ref().map_or(String::new(), |p| p.display().to_string())
        );
    }
    out
}

pub const EXIT_FAILURE: u8 = 1;
pub const EXIT_INFEASIBLE: u8 = 3;
pub const EXIT_SCHEMA: u8 = 4;
pub const EXIT_TIMEOUT: u8 = 5;

/// Process exit status for an error.
pub fn exit_code(error: &Error) -> u8 {
    match error {
        Error::GloballyInfeasible { .. }
        | Error::BaselineInfeasible { .. }
        | Error::InfeasibleBucket(..)
        | Error::NoFeasibleInstance(_) => EXIT_INFEASIBLE,
        Error::Schema(_) | Error::GridMismatch(_) | Error::Json(_) | Error::Csv(_) => EXIT_SCHEMA,
        Error::Timeout(_) => EXIT_TIMEOUT,
        _ => EXIT_FAILURE,
    }
}
