use gpumix::profiles::default_fleet;
use gpumix::{
    load_matrix, synth_profile, tokens_per_dollar, BucketGrid, GpuType, ModelParams, Slice,
    ThroughputProfile,
};
use proptest::prelude::*;

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0)
}

/// The decode model written out by hand for the 7B preset: step time with
/// `n` requests of size `(i, o)` in flight, and the largest batch found by
/// scanning every `n`.
fn oracle_max_tput(gpu: &GpuType, i: f64, o: f64, slo_ms: f64) -> Option<f64> {
    let (weights, kv, params) = (13.48e9, 524_288.0, 6.74e9);
    if gpu.max_request_tokens.is_some_and(|cap| i + o > f64::from(cap)) {
        return None;
    }
    let bw = gpu.mem_bw_gbs * 1e9;
    let step = |n: f64| {
        6e-3 + (weights + n * kv * (i + o / 2.0)) / bw
            + n * 2.0 * params * i * 0.002 / (gpu.fp16_tflops * 1e12)
    };
    let by_memory = ((gpu.mem_gb * 1e9 - weights) / ((i + o) * kv)).floor();
    let cap = by_memory.min(256.0) as u32;
    let best = (1..=cap).filter(|&n| step(f64::from(n)) <= slo_ms / 1e3).max()?;
    let n = f64::from(best);
    Some(n / (o * step(n)))
}

#[test]
fn synthesized_profiles_match_the_hand_evaluated_model() {
    let grid = BucketGrid::default();
    let model = ModelParams::llama2_7b();
    for gpu in default_fleet() {
        for slo in [40.0, 120.0, 250.0] {
            let p = synth_profile(&gpu, &model, &grid, slo).unwrap();
            for b in grid.buckets() {
                let (i, o) = grid.representative(b);
                let expected = oracle_max_tput(&gpu, i, o, slo);
                match (p.max_tput(b), expected) {
                    (Some(got), Some(want)) => {
                        assert!(close(got, want), "{} {b:?} {slo}: {got} vs {want}", gpu.name)
                    }
                    (got, want) => assert_eq!(got, want, "{} {b:?} {slo}", gpu.name),
                }
            }
        }
    }
}

#[test]
fn small_gpus_cannot_serve_capped_buckets() {
    let grid = BucketGrid::default();
    let model = ModelParams::llama2_7b();
    for gpu in default_fleet().into_iter().filter(|g| g.max_request_tokens.is_some()) {
        let p = synth_profile(&gpu, &model, &grid, 120.0).unwrap();
        for b in grid.buckets() {
            let (i, o) = grid.representative(b);
            if i + o > 12_000.0 {
                assert_eq!(p.max_tput(b), None, "{} {b:?}", gpu.name);
            }
        }
    }
}

#[test]
fn weights_that_do_not_fit_make_every_bucket_infeasible() {
    let mut tiny = default_fleet()[0].clone();
    tiny.name = "tiny".into();
    tiny.mem_gb = 8.0;
    let p = synth_profile(&tiny, &ModelParams::llama2_7b(), &BucketGrid::default(), 120.0).unwrap();
    assert_eq!(p.feasible_buckets(), 0);
    assert!(!p.model_fits);
}

fn gpu_strategy() -> impl Strategy<Value = GpuType> {
    (0.2f64..10.0, 16.0f64..160.0, 200.0f64..4000.0, 50.0f64..2000.0).prop_map(
        |(cost, mem, bw, tflops)| GpuType {
            name: "X".into(),
            hourly_cost: cost,
            mem_gb: mem,
            mem_bw_gbs: bw,
            fp16_tflops: tflops,
            max_request_tokens: None,
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn looser_slo_never_lowers_throughput(gpu in gpu_strategy(), slo in 20.0f64..200.0, extra in 0.0f64..200.0) {
        let grid = BucketGrid::default();
        let model = ModelParams::llama2_7b();
        let tight = synth_profile(&gpu, &model, &grid, slo).unwrap();
        let loose = synth_profile(&gpu, &model, &grid, slo + extra).unwrap();
        for b in grid.buckets() {
            if let Some(t) = tight.max_tput(b) {
                let l = loose.max_tput(b);
                prop_assert!(l.is_some_and(|l| l >= t * (1.0 - 1e-12)), "{b:?}");
            }
        }
    }

    #[test]
    fn synthesis_is_deterministic(gpu in gpu_strategy(), slo in 20.0f64..200.0) {
        let grid = BucketGrid::default();
        let model = ModelParams::llama2_7b();
        let a = synth_profile(&gpu, &model, &grid, slo).unwrap();
        let b = synth_profile(&gpu, &model, &grid, slo).unwrap();
        prop_assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
        prop_assert_eq!(ThroughputProfile::from_json(&a.to_json().unwrap()).unwrap(), a);
    }

    #[test]
    fn loads_are_rate_over_max_tput_and_linear(
        rates in prop::collection::vec(0.001f64..5.0, 1..40),
        k in 0.1f64..10.0,
    ) {
        let grid = BucketGrid::default();
        let model = ModelParams::llama2_7b();
        let profiles: Vec<_> = default_fleet()
            .iter()
            .map(|g| synth_profile(g, &model, &grid, 120.0).unwrap())
            .collect();
        let buckets: Vec<_> = grid.buckets().collect();
        let slices: Vec<Slice> = rates
            .iter()
            .enumerate()
            .map(|(n, &rate)| Slice { bucket: buckets[(n * 7) % buckets.len()], part: 0, rate })
            .collect();
        let scaled: Vec<Slice> = slices.iter().map(|s| Slice { rate: s.rate * k, ..*s }).collect();
        let base = load_matrix(&slices, &profiles).unwrap();
        let more = load_matrix(&scaled, &profiles).unwrap();
        for (s, slice) in slices.iter().enumerate() {
            for (j, p) in profiles.iter().enumerate() {
                match p.max_tput(slice.bucket) {
                    Some(t) => {
                        prop_assert!(close(base.get(s, j).unwrap(), slice.rate / t));
                        prop_assert!(close(more.get(s, j).unwrap(), k * base.get(s, j).unwrap()));
                    }
                    None => {
                        prop_assert_eq!(base.get(s, j), None);
                        prop_assert_eq!(more.get(s, j), None);
                    }
                }
            }
        }
    }

    #[test]
    fn tokens_per_dollar_scales_inversely_with_price(k in 0.1f64..10.0) {
        let grid = BucketGrid::default();
        let model = ModelParams::llama2_7b();
        for gpu in default_fleet() {
            let mut pricier = gpu.clone();
            pricier.hourly_cost *= k;
            let a = synth_profile(&gpu, &model, &grid, 120.0).unwrap();
            let b = synth_profile(&pricier, &model, &grid, 120.0).unwrap();
            for bucket in grid.buckets() {
                if a.max_tput(bucket).is_some() {
                    let ta = tokens_per_dollar(&a, bucket).unwrap();
                    let tb = tokens_per_dollar(&b, bucket).unwrap();
                    prop_assert!(close(ta / k, tb));
                } else {
                    prop_assert!(tokens_per_dollar(&b, bucket).is_err());
                }
            }
        }
    }
}

#[test]
fn import_rejects_a_throughput_on_a_capped_bucket() {
    let grid = BucketGrid::default();
    let l4 = default_fleet()[0].clone();
    let mut entries = vec![None; grid.n_buckets()];
    entries[grid.flat_index((9, 5))] = Some(0.01);
    assert!(matches!(
        ThroughputProfile::new(l4, 120.0, grid, entries),
        Err(gpumix::Error::Schema(_))
    ));
}

#[test]
fn import_rejects_a_grid_mismatch() {
    let grid = BucketGrid::default();
    let a100 = default_fleet()[2].clone();
    let entries = vec![Some(1.0); grid.n_buckets() - 1];
    assert!(matches!(
        ThroughputProfile::new(a100, 120.0, grid, entries),
        Err(gpumix::Error::GridMismatch(_))
    ));
}
