use std::path::PathBuf;
use std::time::{Duration, Instant};

use gpumix::{
    check_allocation, formulate, import_profile, load_matrix, slice_workload, solve_exact_with,
    solve_single_type, synth_profile, GpuRegistry, ModelParams, SolverOptions, ThroughputProfile,
    WorkloadHistogram,
};

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

fn fixture_profiles(slo: u32) -> Vec<ThroughputProfile> {
    GpuRegistry::load(fixture("gpus.json"))
        .unwrap()
        .gpus
        .iter()
        .map(|g| import_profile(fixture(&format!("profiles/{}-{slo}ms.json", g.name))).unwrap())
        .collect()
}

#[test]
fn registry_fixture_is_the_default_fleet() {
    assert_eq!(GpuRegistry::load(fixture("gpus.json")).unwrap(), GpuRegistry::default());
}

#[test]
fn profile_fixtures_match_the_generator() {
    let model = ModelParams::llama2_7b();
    for slo in [40, 120] {
        for p in fixture_profiles(slo) {
            let fresh = synth_profile(&p.gpu, &model, &p.grid, f64::from(slo)).unwrap();
            assert_eq!(fresh, p, "{} at {slo} ms", p.gpu.name);
        }
    }
}

#[test]
fn full_grid_fixture_fills_every_bucket() {
    let h = WorkloadHistogram::load(fixture("full_grid.json")).unwrap();
    assert_eq!(h.grid().n_buckets(), 60);
    assert_eq!(h.non_empty_buckets(), 60);
    assert_eq!(slice_workload(&h, 8).unwrap().len(), 480);
}

#[test]
fn short_preset_keeps_small_gpu_baselines_feasible() {
    let profiles = fixture_profiles(120);
    let costs: Vec<f64> = profiles.iter().map(|p| p.gpu.hourly_cost).collect();
    for rate in [1.0, 4.0, 32.0] {
        let h = gpumix::workload::preset("short", rate).unwrap();
        let slices = slice_workload(&h, 8).unwrap();
        let inst = formulate(&slices, &load_matrix(&slices, &profiles).unwrap(), &costs).unwrap();
        for j in 0..inst.n_gpu_types() {
            let a = solve_single_type(&inst, j).unwrap();
            assert!(check_allocation(&inst, &a).is_empty());
        }
    }
}

#[test]
fn long_preset_rules_out_small_gpu_baselines() {
    let profiles = fixture_profiles(120);
    let costs: Vec<f64> = profiles.iter().map(|p| p.gpu.hourly_cost).collect();
    let h = gpumix::workload::preset("long", 4.0).unwrap();
    let slices = slice_workload(&h, 8).unwrap();
    let inst = formulate(&slices, &load_matrix(&slices, &profiles).unwrap(), &costs).unwrap();
    for j in 0..2 {
        assert!(matches!(
            solve_single_type(&inst, j),
            Err(gpumix::Error::BaselineInfeasible { .. })
        ));
    }
}

#[test]
fn full_grid_instance_solves_to_optimality_within_budget() {
    let h = WorkloadHistogram::load(fixture("full_grid.json")).unwrap();
    let opts = SolverOptions {
        time_budget: Duration::from_secs(60),
    };
    for slo in [40, 120] {
        let profiles = fixture_profiles(slo);
        let costs: Vec<f64> = profiles.iter().map(|p| p.gpu.hourly_cost).collect();
        for rate in [4.0, 32.0, 100.0] {
            let scaled = gpumix::scale_rate(&h, rate / h.total_rate()).unwrap();
            let slices = slice_workload(&scaled, 8).unwrap();
            let inst =
                formulate(&slices, &load_matrix(&slices, &profiles).unwrap(), &costs).unwrap();
            assert_eq!((inst.n_slices(), inst.n_gpu_types()), (480, 4));
            let start = Instant::now();
            let a = solve_exact_with(&inst, &opts).unwrap();
            assert!(start.elapsed() < opts.time_budget);
            assert!(a.proven_optimal);
            assert!(check_allocation(&inst, &a).is_empty());
            for j in 0..4 {
                if let Ok(single) = solve_single_type(&inst, j) {
                    assert!(a.total_cost_micros <= single.total_cost_micros);
                }
            }
        }
    }
}
