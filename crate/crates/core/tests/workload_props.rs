use gpumix::workload::{read_trace_from, DEFAULT_INPUT_EDGES, DEFAULT_OUTPUT_EDGES};
use gpumix::{
    build_histogram, mix_histograms, scale_rate, slice_workload, BucketGrid, RequestRecord,
    WorkloadHistogram,
};
use proptest::prelude::*;

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0)
}

/// Linear scan over upper edges, independent of the grid's own lookup.
fn oracle_bucket(edges: &[u32], v: u32) -> Option<usize> {
    edges.iter().position(|&e| v <= e)
}

fn records() -> impl Strategy<Value = Vec<RequestRecord>> {
    let size = |max: u32| {
        prop_oneof![
            3 => 1..=max,
            1 => prop::sample::select(vec![1, 25, 26, 100, 101, 2000, max]),
        ]
    };
    prop::collection::vec(
        (size(32_000), size(2_000)).prop_map(|(i, o)| RequestRecord::new(i, o)),
        1..200,
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn histogram_matches_a_direct_count(recs in records(), rate in 0.1f64..100.0) {
        let grid = BucketGrid::default();
        let hist = build_histogram(&recs, &grid, rate).unwrap();
        let mut counts = vec![vec![0usize; DEFAULT_OUTPUT_EDGES.len()]; DEFAULT_INPUT_EDGES.len()];
        for r in &recs {
            let i = oracle_bucket(&DEFAULT_INPUT_EDGES, r.input_tokens).unwrap();
            let o = oracle_bucket(&DEFAULT_OUTPUT_EDGES, r.output_tokens).unwrap();
            counts[i][o] += 1;
        }
        for (i, row) in counts.iter().enumerate() {
            for (o, &c) in row.iter().enumerate() {
                let expected = c as f64 * rate / recs.len() as f64;
                prop_assert!(close(hist.rate((i, o)), expected), "bucket ({i},{o})");
            }
        }
        prop_assert!(close(hist.rates().iter().flatten().sum::<f64>(), rate));
        prop_assert!(close(hist.total_rate(), rate));
    }

    #[test]
    fn record_order_does_not_matter(recs in records(), seed in any::<u64>()) {
        let grid = BucketGrid::default();
        let mut shuffled = recs.clone();
        // Deterministic Fisher-Yates driven by an LCG.
        let mut state = seed | 1;
        for k in (1..shuffled.len()).rev() {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            shuffled.swap(k, (state >> 33) as usize % (k + 1));
        }
        prop_assert_eq!(
            build_histogram(&recs, &grid, 5.0).unwrap(),
            build_histogram(&shuffled, &grid, 5.0).unwrap()
        );
    }

    #[test]
    fn rate_scaling_is_equivariant(recs in records(), rate in 0.1f64..50.0, k in 0.1f64..20.0) {
        let grid = BucketGrid::default();
        let scaled = scale_rate(&build_histogram(&recs, &grid, rate).unwrap(), k).unwrap();
        let direct = build_histogram(&recs, &grid, rate * k).unwrap();
        prop_assert!(close(scaled.total_rate(), direct.total_rate()));
        for b in grid.buckets() {
            prop_assert!(close(scaled.rate(b), direct.rate(b)));
        }
    }

    #[test]
    fn slices_partition_every_bucket(recs in records(), factor in 1u32..=16) {
        let hist = build_histogram(&recs, &BucketGrid::default(), 7.0).unwrap();
        let slices = slice_workload(&hist, factor).unwrap();
        prop_assert_eq!(slices.len(), hist.non_empty_buckets() * factor as usize);
        for b in hist.grid().buckets() {
            let parts: Vec<_> = slices.iter().filter(|s| s.bucket == b).collect();
            if hist.rate(b) == 0.0 {
                prop_assert!(parts.is_empty());
                continue;
            }
            prop_assert_eq!(parts.len(), factor as usize);
            prop_assert!(parts.iter().all(|s| s.rate == parts[0].rate));
            let sum: f64 = parts.iter().map(|s| s.rate).sum();
            prop_assert!(close(sum, hist.rate(b)));
            let mut idx: Vec<u32> = parts.iter().map(|s| s.part).collect();
            idx.sort_unstable();
            prop_assert_eq!(idx, (0..factor).collect::<Vec<_>>());
        }
    }

    #[test]
    fn histogram_json_round_trips(recs in records(), rate in 0.1f64..100.0) {
        let hist = build_histogram(&recs, &BucketGrid::default(), rate).unwrap();
        let back = WorkloadHistogram::from_json(&hist.to_json().unwrap()).unwrap();
        prop_assert_eq!(back, hist);
    }

    #[test]
    fn trace_csv_round_trips(recs in records()) {
        let mut text = String::from("input_tokens,output_tokens\n");
        for r in &recs {
            text.push_str(&format!("{},{}\n", r.input_tokens, r.output_tokens));
        }
        prop_assert_eq!(read_trace_from(text.as_bytes()).unwrap(), recs);
    }

    #[test]
    fn mixing_blends_shares(a in records(), b in records(), w in 0.0f64..=1.0, rate in 0.5f64..20.0) {
        let grid = BucketGrid::default();
        let ha = build_histogram(&a, &grid, 3.0).unwrap();
        let hb = build_histogram(&b, &grid, 11.0).unwrap();
        let mixed = mix_histograms(&ha, &hb, w, rate).unwrap();
        prop_assert!(close(mixed.total_rate(), rate));
        for bucket in grid.buckets() {
            let expected = (w * ha.rate(bucket) / 3.0 + (1.0 - w) * hb.rate(bucket) / 11.0) * rate;
            prop_assert!(close(mixed.rate(bucket), expected));
        }
    }
}

#[test]
fn edges_are_upper_inclusive() {
    let grid = BucketGrid::default();
    for (k, &edge) in DEFAULT_INPUT_EDGES.iter().enumerate() {
        assert_eq!(grid.bucket_of(edge, 1), Some((k, 0)));
        if k + 1 < DEFAULT_INPUT_EDGES.len() {
            assert_eq!(grid.bucket_of(edge + 1, 1), Some((k + 1, 0)));
        }
    }
    for (k, &edge) in DEFAULT_OUTPUT_EDGES.iter().enumerate() {
        assert_eq!(grid.bucket_of(1, edge), Some((0, k)));
    }
    assert_eq!(grid.bucket_of(grid.max_input() + 1, 1), None);
    assert_eq!(grid.bucket_of(1, grid.max_output() + 1), None);
}

#[test]
fn out_of_grid_record_is_reported_with_its_index() {
    let recs = vec![RequestRecord::new(10, 10), RequestRecord::new(10, 9_999)];
    let err = build_histogram(&recs, &BucketGrid::default(), 1.0).unwrap_err();
    assert!(matches!(
        err,
        gpumix::Error::RecordOutOfGrid { index: 1, output_tokens: 9_999, .. }
    ));
}

#[test]
fn presets_scale_to_the_requested_rate() {
    for name in gpumix::workload::PRESETS {
        for rate in [1.0, 4.0, 32.0] {
            let h = gpumix::workload::preset(name, rate).unwrap();
            assert!(close(h.total_rate(), rate), "{name}");
            assert!(close(h.rates().iter().flatten().sum::<f64>(), rate), "{name}");
        }
    }
}
