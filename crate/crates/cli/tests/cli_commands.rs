use std::path::Path;
use std::process::Command;

use gpumix::profiles::default_fleet;
use gpumix::{savings, BucketGrid, GpuRegistry, WorkloadHistogram};
use gpumix_cli::{
    cmd_compare, cmd_plan, cmd_simulate, cmd_sweep, ScenarioSpec, SimulateOptions, WorkloadSpec,
    EXIT_INFEASIBLE, EXIT_SCHEMA, EXIT_TIMEOUT, MIXED_LABEL,
};

fn preset(name: &str, rate: f64, slo: f64) -> ScenarioSpec {
    ScenarioSpec::new(WorkloadSpec::Preset { name: name.into() }, rate, slo)
}

fn count(report: &gpumix::allocator::AllocationReport, gpu: &str) -> u32 {
    report.count_of(gpu).unwrap()
}

#[test]
fn plan_mixes_the_two_cheap_gpus_at_low_rate() {
    let report = cmd_plan(&preset("short", 2.0, 120.0)).unwrap();
    let a = &report.allocation;
    assert_eq!(
        (count(a, "L4"), count(a, "A10G"), count(a, "A100"), count(a, "H100")),
        (1, 1, 0, 0)
    );
    assert!((a.total_cost - 1.71).abs() < 1e-9);
    assert!(a.proven_optimal);
    assert!(report.render().contains("total cost 1.710 $/hr"));
}

#[test]
fn plan_sizes_for_the_over_provisioned_rate() {
    let mut spec = preset("short", 4.0, 120.0);
    spec.over_provision = 1.1;
    let over = cmd_plan(&spec).unwrap();
    let direct = cmd_plan(&preset("short", 4.4, 120.0)).unwrap();
    assert!((over.solved_rate - 4.4).abs() < 1e-12);
    assert_eq!(over.allocation.counts, direct.allocation.counts);
}

#[test]
fn zero_demand_histogram_gives_an_empty_plan() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("empty.json");
    WorkloadHistogram::empty(BucketGrid::default()).save(&path).unwrap();
    let spec = ScenarioSpec::new(WorkloadSpec::Histogram { path }, 1.0, 120.0);
    let report = cmd_plan(&spec).unwrap();
    assert_eq!(report.n_slices, 0);
    assert_eq!(report.allocation.total_cost, 0.0);
    assert!(report.allocation.counts.iter().all(|c| c.count == 0));
}

#[test]
fn compare_reports_module_savings_and_dominance() {
    let report = cmd_compare(&preset("short", 8.0, 120.0)).unwrap();
    let mixed = report.mixed();
    assert_eq!(mixed.label, MIXED_LABEL);
    let mixed_cost = mixed.total_cost.unwrap();
    for row in &report.rows[..report.rows.len() - 1] {
        let cost = row.total_cost.unwrap();
        assert!(mixed_cost <= cost + 1e-9, "{}", row.label);
        let s = mixed.savings.iter().find(|s| s.baseline == row.label).unwrap();
        assert_eq!(s.percent, savings(mixed_cost, cost).unwrap());
    }
}

#[test]
fn compare_annotates_infeasible_baselines() {
    let report = cmd_compare(&preset("long", 4.0, 120.0)).unwrap();
    for label in ["L4-only", "A10G-only"] {
        let row = report.row(label).unwrap();
        assert_eq!(row.total_cost, None);
        assert!(row.note.as_deref().unwrap().starts_with("infeasible"));
        assert!(report.mixed().savings.iter().all(|s| s.baseline != label));
    }
    assert!(report.row("A100-only").unwrap().total_cost.is_some());
}

#[test]
fn sweep_produces_one_block_per_rate_normalized_to_mixed() {
    let spec = preset("short", 1.0, 120.0);
    let rates = [1.0, 2.0, 4.0, 8.0, 16.0, 32.0];
    let report = cmd_sweep(&spec, &rates).unwrap();
    assert_eq!(report.blocks.len(), 6);
    assert_eq!(report.normalized.len(), 6);
    for row in &report.normalized {
        let (label, mixed) = row.costs.last().unwrap();
        assert_eq!(label, MIXED_LABEL);
        assert_eq!(*mixed, Some(1.0));
        assert!(row.costs.iter().flat_map(|(_, c)| *c).all(|c| c >= 1.0 - 1e-12));
    }
}

#[test]
fn single_rate_sweep_equals_compare() {
    let spec = preset("mixed-80-20", 3.0, 40.0);
    let sweep = cmd_sweep(&spec, &[3.0]).unwrap();
    let compare = cmd_compare(&spec).unwrap();
    assert_eq!(
        serde_json::to_string(sweep.blocks[0].report.as_ref().unwrap()).unwrap(),
        serde_json::to_string(&compare).unwrap()
    );
}

#[test]
fn sweep_rejects_unsorted_rates() {
    assert!(cmd_sweep(&preset("short", 1.0, 120.0), &[2.0, 1.0]).is_err());
    assert!(cmd_sweep(&preset("short", 1.0, 120.0), &[]).is_err());
}

fn sim_options(seed: u64, n: usize) -> SimulateOptions {
    SimulateOptions {
        allocation: None,
        seed,
        n_requests: n,
        replay: false,
        cdf_out: None,
        requests_out: None,
    }
}

#[test]
fn simulate_single_request_gives_a_single_sample_cdf() {
    let dir = tempfile::tempdir().unwrap();
    let cdf = dir.path().join("cdf.csv");
    let mut options = sim_options(1, 1);
    options.cdf_out = Some(cdf.clone());
    let report = cmd_simulate(&preset("short", 4.0, 120.0), &options).unwrap();
    assert_eq!(report.summary.n_requests, 1);
    let text = std::fs::read_to_string(cdf).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "tpot_ms,cumulative_fraction");
    assert_eq!(lines.len(), 2);
    assert!(lines[1].ends_with(",1.000000"));
}

#[test]
fn simulate_is_repeatable_and_uses_a_saved_plan() {
    let dir = tempfile::tempdir().unwrap();
    let spec = preset("short", 4.0, 120.0);
    let plan_path = dir.path().join("plan.json");
    std::fs::write(&plan_path, serde_json::to_string(&cmd_plan(&spec).unwrap()).unwrap()).unwrap();
    let a = cmd_simulate(&spec, &sim_options(7, 300)).unwrap();
    let b = cmd_simulate(&spec, &sim_options(7, 300)).unwrap();
    let mut saved = sim_options(7, 300);
    saved.allocation = Some(plan_path);
    let c = cmd_simulate(&spec, &saved).unwrap();
    assert_eq!(a, b);
    assert_eq!(a, c);
    assert!(a.render().contains(&format!("attainment {:.4}", a.summary.attainment)));
}

#[test]
fn scenario_validation() {
    let mut spec = preset("short", 4.0, 120.0);
    spec.slice_factor = 0;
    assert!(spec.validate().is_err());
    let mut spec = preset("short", 4.0, 120.0);
    spec.over_provision = 0.9;
    assert!(spec.validate().is_err());
    assert!(preset("short", 0.0, 120.0).validate().is_err());
    assert!(WorkloadSpec::parse("nonsense").is_err());
    assert_eq!(
        WorkloadSpec::parse("trace:t.csv").unwrap(),
        WorkloadSpec::Trace { path: "t.csv".into() }
    );
    assert_eq!(
        WorkloadSpec::parse("h.json").unwrap(),
        WorkloadSpec::Histogram { path: "h.json".into() }
    );
}

fn gpumix(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_gpumix"))
        .args(args)
        .output()
        .unwrap()
}

fn code(out: &std::process::Output) -> i32 {
    out.status.code().unwrap()
}

#[test]
fn binary_plans_and_prints_json() {
    let out = gpumix(&["plan", "--workload", "short", "--rate", "2", "--slo-ms", "120", "--json"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["allocation"]["total_cost"], serde_json::json!(1.71));
    assert!(v.get("wall_time_s").is_none());
}

#[test]
fn binary_exit_code_for_global_infeasibility() {
    let dir = tempfile::tempdir().unwrap();
    let reg = dir.path().join("small.json");
    let small = GpuRegistry {
        schema_version: 1,
        gpus: default_fleet()[..2].to_vec(),
    };
    std::fs::write(&reg, small.to_json().unwrap()).unwrap();
    let out = gpumix(&["plan", "--workload", "long", "--rate", "4", "--gpus", path(&reg)]);
    assert_eq!(code(&out), i32::from(EXIT_INFEASIBLE));
    assert!(String::from_utf8_lossy(&out.stderr).contains("no GPU type can serve buckets"));
}

#[test]
fn binary_exit_code_for_schema_errors() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"schema_version": 1, "gpu": {}}"#).unwrap();
    let out = gpumix(&["profile", "import", path(&bad)]);
    assert_eq!(code(&out), i32::from(EXIT_SCHEMA));
}

#[test]
fn binary_exit_code_for_timeouts() {
    let out = gpumix(&[
        "plan", "--workload", "long", "--rate", "32", "--time-budget-s", "1e-9",
    ]);
    assert_eq!(code(&out), i32::from(EXIT_TIMEOUT));
}

#[test]
fn binary_profile_gen_then_plan_on_imported_profiles() {
    let dir = tempfile::tempdir().unwrap();
    let out = gpumix(&["profile", "gen", "--slo-ms", "120", "--out", path(dir.path())]);
    assert_eq!(code(&out), 0);
    let mut args = vec!["plan", "--workload", "short", "--rate", "2", "--json"];
    let files: Vec<String> = ["L4", "A10G", "A100", "H100"]
        .iter()
        .map(|g| dir.path().join(format!("{g}-120ms.json")).display().to_string())
        .collect();
    for f in &files {
        args.extend(["--profile", f.as_str()]);
    }
    let imported = gpumix(&args);
    let synthesized = gpumix(&["plan", "--workload", "short", "--rate", "2", "--json"]);
    assert_eq!(code(&imported), 0, "{}", String::from_utf8_lossy(&imported.stderr));
    let a: serde_json::Value = serde_json::from_slice(&imported.stdout).unwrap();
    let b: serde_json::Value = serde_json::from_slice(&synthesized.stdout).unwrap();
    assert_eq!(a["allocation"], b["allocation"]);
}

#[test]
fn binary_reads_a_scenario_file_and_flags_override_it() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("scenario.json");
    std::fs::write(&file, serde_json::to_string(&preset("short", 2.0, 120.0)).unwrap()).unwrap();
    let from_file = gpumix(&["plan", "--scenario", path(&file), "--json"]);
    let v: serde_json::Value = serde_json::from_slice(&from_file.stdout).unwrap();
    assert_eq!(v["allocation"]["total_cost"], serde_json::json!(1.71));
    let overridden = gpumix(&["plan", "--scenario", path(&file), "--rate", "8", "--json"]);
    let v: serde_json::Value = serde_json::from_slice(&overridden.stdout).unwrap();
    assert_eq!(v["scenario"]["total_rate"], serde_json::json!(8.0));
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}
