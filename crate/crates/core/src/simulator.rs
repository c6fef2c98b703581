//! Discrete-event simulation of a provisioned fleet serving a request stream.
//!
//! Requests arrive (Poisson or trace replay), a load balancer estimates each
//! request's output length from the running mean of outputs previously seen
//! for its input bucket, and picks an instance at random with probability
//! proportional to that instance's MaxTput for the estimated bucket.
//!
//! Service model: an instance runs continuous batching. Every decode step
//! advances all in-flight requests by one token and lasts
//! `fixed_step_s + sum(per_request_step_s)` from [`ModelParams`]; with `n`
//! identical requests this is exactly the step time the synthetic profiler
//! uses, so solver capacity and simulated capacity agree by construction.
//! Requests arriving mid-step join at the next step boundary. Admission is
//! unbounded, so overload shows up as longer steps rather than queueing.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::allocator::Allocation;
use crate::error::{BucketId, Error, Result};
use crate::profiles::{ModelParams, ThroughputProfile};
use crate::workload::{BucketGrid, RequestRecord, WorkloadHistogram};

const SIZE_STREAM: u64 = 0;
const ARRIVAL_STREAM: u64 = 1;
const ROUTING_STREAM: u64 = 2;

/// Per-input-bucket running mean of observed output lengths.
#[derive(Debug, Clone, PartialEq)]
pub struct LbState {
    grid: BucketGrid,
    sums: Vec<u64>,
    counts: Vec<u64>,
}

impl LbState {
    pub fn new(grid: BucketGrid) -> Self {
        let n = grid.n_input();
        Self {
            grid,
            sums: vec![0; n],
            counts: vec![0; n],
        }
    }

    pub fn grid(&self) -> &BucketGrid {
        &self.grid
    }

    pub fn observe(&mut self, input_tokens: u32, output_tokens: u32) {
        if let Some(k) = self.grid.input_bucket(f64::from(input_tokens)) {
            self.sums[k] += u64::from(output_tokens);
            self.counts[k] += 1;
        }
    }

    /// Exact `(sum, count)` of observed outputs for an input bucket.
    pub fn observed(&self, input_bucket: usize) -> (u64, u64) {
        (self.sums[input_bucket], self.counts[input_bucket])
    }

    pub fn mean_output(&self, input_bucket: usize) -> Option<f64> {
        let (sum, count) = self.observed(input_bucket);
        (count > 0).then(|| sum as f64 / count as f64)
    }

    /// Output estimate used before any observation: the midpoint of the
    /// median output bucket.
    pub fn fallback_output(&self) -> f64 {
        let median = (self.grid.n_output() - 1) / 2;
        let (lo, hi) = self.grid.output_range(median);
        (f64::from(lo) + f64::from(hi)) / 2.0
    }
}

/// Bucket of a new request from its input length and the estimated output.
pub fn estimate_bucket(lb: &LbState, input_tokens: u32) -> Result<BucketId> {
    let grid = &lb.grid;
    let input = grid.input_bucket(f64::from(input_tokens)).ok_or_else(|| {
        Error::InvalidInput(format!(
            "input of {input_tokens} tokens exceeds the grid maximum {}",
            grid.max_input()
        ))
    })?;
    let estimate = lb.mean_output(input).unwrap_or_else(|| lb.fallback_output());
    let output = grid.output_bucket(estimate).unwrap_or(grid.n_output() - 1);
    Ok((input, output))
}

/// Routing weight of each instance for `bucket`: its type's MaxTput, zero
/// where infeasible.
pub fn routing_weights(bucket: BucketId, instances: &[&ThroughputProfile]) -> Vec<f64> {
    instances
        .iter()
        .map(|p| p.max_tput(bucket).unwrap_or(0.0))
        .collect()
}

/// Weighted random choice of an instance for a request in `bucket`.
pub fn route(
    bucket: BucketId,
    instances: &[&ThroughputProfile],
    rng: &mut impl Rng,
) -> Result<usize> {
    let weights = routing_weights(bucket, instances);
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) {
        return Err(Error::NoFeasibleInstance(bucket));
    }
    let target = rng.random::<f64>() * total;
    let mut acc = 0.0;
    let mut last = 0;
    for (g, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            acc += w;
            last = g;
            if target < acc {
                return Ok(g);
            }
        }
    }
    Ok(last)
}

#[derive(Debug, Clone, PartialEq)]
pub enum WorkloadSource {
    /// Sample buckets by rate share, sizes uniform within each bucket.
    Histogram(WorkloadHistogram),
    /// Sample recorded requests (Poisson arrivals) or replay them in order
    /// ([`Arrival::TraceReplay`]).
    Trace(Vec<RequestRecord>),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Arrival {
    Poisson { rate: f64 },
    TraceReplay,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub allocation: Allocation,
    /// One profile per GPU type in the allocation, matched by name.
    pub profiles: Vec<ThroughputProfile>,
    pub model: ModelParams,
    pub workload: WorkloadSource,
    pub arrival: Arrival,
    pub n_requests: usize,
    pub seed: u64,
    pub slo_tpot_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
pub struct RequestOutcome {
    pub id: usize,
    pub arrival_s: f64,
    pub input_tokens: u32,
    pub output_tokens: u32,
    /// Serving instance; `None` when the request was dropped.
    pub instance: Option<usize>,
    pub tpot_ms: Option<f64>,
    pub ttft_ms: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
pub struct SimSummary {
    pub n_requests: usize,
    pub completed: usize,
    pub dropped: usize,
    pub slo_tpot_ms: f64,
    pub attainment: f64,
    pub tpot_p50_ms: Option<f64>,
    pub tpot_p99_ms: Option<f64>,
    pub tpot_mean_ms: Option<f64>,
    pub ttft_p50_ms: Option<f64>,
    pub makespan_s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimResult {
    /// Indexed by request id.
    pub outcomes: Vec<RequestOutcome>,
    /// GPU type name of every instance.
    pub instances: Vec<String>,
    pub completed: usize,
    pub dropped: usize,
    pub slo_tpot_ms: f64,
    pub attainment: f64,
    pub makespan_s: f64,
}

fn percentile(sorted: &[f64], p: f64) -> Option<f64> {
    if sorted.is_empty() {
        return None;
    }
    let rank = (p / 100.0 * sorted.len() as f64).ceil() as usize;
    Some(sorted[rank.clamp(1, sorted.len()) - 1])
}

impl SimResult {
    pub fn tpot_samples(&self) -> Vec<f64> {
        self.outcomes.iter().filter_map(|o| o.tpot_ms).collect()
    }

    /// `(tpot_ms, cumulative_fraction)` over completed requests.
    pub fn cdf(&self) -> Vec<(f64, f64)> {
        let mut samples = self.tpot_samples();
        samples.sort_by(f64::total_cmp);
        let n = samples.len() as f64;
        samples
            .into_iter()
            .enumerate()
            .map(|(k, t)| (t, (k + 1) as f64 / n))
            .collect()
    }

    pub fn summary(&self) -> SimSummary {
        let mut tpot = self.tpot_samples();
        tpot.sort_by(f64::total_cmp);
        let mut ttft: Vec<f64> = self.outcomes.iter().filter_map(|o| o.ttft_ms).collect();
        ttft.sort_by(f64::total_cmp);
        SimSummary {
            n_requests: self.outcomes.len(),
            completed: self.completed,
            dropped: self.dropped,
            slo_tpot_ms: self.slo_tpot_ms,
            attainment: self.attainment,
            tpot_p50_ms: percentile(&tpot, 50.0),
            tpot_p99_ms: percentile(&tpot, 99.0),
            tpot_mean_ms: (!tpot.is_empty()).then(|| tpot.iter().sum::<f64>() / tpot.len() as f64),
            ttft_p50_ms: percentile(&ttft, 50.0),
            makespan_s: self.makespan_s,
        }
    }

    /// Per-request CSV: `id,arrival_s,input_tokens,output_tokens,instance,gpu,tpot_ms,ttft_ms`.
    pub fn write_requests_csv(&self, out: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "id",
            "arrival_s",
            "input_tokens",
            "output_tokens",
            "instance",
            "gpu",
            "tpot_ms",
            "ttft_ms",
        ])?;
        for o in &self.outcomes {
            let opt = |v: Option<f64>| v.map(|x| format!("{x:.6}")).unwrap_or_default();
            w.write_record([
                o.id.to_string(),
                format!("{:.6}", o.arrival_s),
                o.input_tokens.to_string(),
                o.output_tokens.to_string(),
                o.instance.map(|g| g.to_string()).unwrap_or_default(),
                o.instance.map(|g| self.instances[g].clone()).unwrap_or_default(),
                opt(o.tpot_ms),
                opt(o.ttft_ms),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// CDF CSV: `tpot_ms,cumulative_fraction`.
    pub fn write_cdf_csv(&self, out: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["tpot_ms", "cumulative_fraction"])?;
        for (t, f) in self.cdf() {
            w.write_record([format!("{t:.6}"), format!("{f:.6}")])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Fraction of requests whose average TPOT is within `slo_tpot_ms`; dropped
/// requests count as violations.
pub fn slo_attainment(result: &SimResult, slo_tpot_ms: f64) -> Result<f64> {
    let total = result.completed + result.dropped;
    if total == 0 {
        return Err(Error::EmptyResult);
    }
    let met = result
        .outcomes
        .iter()
        .filter(|o| o.tpot_ms.is_some_and(|t| t <= slo_tpot_ms))
        .count();
    Ok(met as f64 / total as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Event {
    time: f64,
    seq: u64,
    kind: EventKind,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum EventKind {
    Arrival(usize),
    StepEnd(usize),
}

impl Eq for Event {}

impl Ord for Event {
    fn cmp(&self, other: &Self) -> Ordering {
        // Reversed: BinaryHeap is a max-heap and we want the earliest event.
        other
            .time
            .total_cmp(&self.time)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

struct Active {
    id: usize,
    remaining: u32,
    decode_start: f64,
    step_cost_s: f64,
}

struct Instance {
    kind: usize,
    fixed_s: f64,
    running: Vec<Active>,
    waiting: Vec<usize>,
    busy: bool,
}

struct Pending {
    arrival: f64,
    input: u32,
    output: u32,
}

fn validate(config: &SimConfig) -> Result<Vec<usize>> {
    if config.n_requests == 0 {
        return Err(Error::InvalidInput("n_requests must be >= 1".into()));
    }
    if !(config.slo_tpot_ms > 0.0) {
        return Err(Error::InvalidInput("slo_tpot_ms must be positive".into()));
    }
    if let Arrival::Poisson { rate } = config.arrival {
        if !(rate > 0.0 && rate.is_finite()) {
            return Err(Error::InvalidInput("Poisson rate must be positive".into()));
        }
    }
    let alloc = &config.allocation;
    if alloc.total_instances() == 0 {
        return Err(Error::InvalidInput("allocation provisions no instances".into()));
    }
    let profile_of: Vec<usize> = alloc
        .gpu_names
        .iter()
        .zip(&alloc.counts)
        .map(|(name, &count)| {
            let found = config.profiles.iter().position(|p| &p.gpu.name == name);
            match found {
                Some(k) => Ok(k),
                None if count == 0 => Ok(usize::MAX),
                None => Err(Error::InvalidInput(format!("no profile for GPU type {name}"))),
            }
        })
        .collect::<Result<_>>()?;
    let grid = &config.profiles[profile_of.iter().copied().find(|&k| k != usize::MAX).unwrap()]
        .grid;
    if config.profiles.iter().any(|p| &p.grid != grid) {
        return Err(Error::GridMismatch("simulated profiles must share one grid".into()));
    }
    match (&config.workload, config.arrival) {
        (WorkloadSource::Histogram(h), _) if h.grid() != grid => {
            return Err(Error::GridMismatch(
                "workload histogram grid differs from the profile grid".into(),
            ))
        }
        (WorkloadSource::Histogram(h), _) if !(h.total_rate() > 0.0) => {
            return Err(Error::InvalidInput("workload histogram is empty".into()))
        }
        (WorkloadSource::Histogram(_), Arrival::TraceReplay) => {
            return Err(Error::InvalidInput(
                "trace replay needs a trace workload".into(),
            ))
        }
        (WorkloadSource::Trace(t), arrival) => {
            if t.is_empty() {
                return Err(Error::EmptyTrace);
            }
            if arrival == Arrival::TraceReplay && t.iter().any(|r| r.arrival_time.is_none()) {
                return Err(Error::InvalidInput(
                    "trace replay needs arrival_time on every record".into(),
                ));
            }
        }
        _ => {}
    }
    Ok(profile_of)
}

fn generate(config: &SimConfig, grid: &BucketGrid) -> Result<Vec<Pending>> {
    let n = config.n_requests;
    let mut size_rng = ChaCha8Rng::seed_from_u64(config.seed);
    size_rng.set_stream(SIZE_STREAM);
    let mut arrival_rng = ChaCha8Rng::seed_from_u64(config.seed);
    arrival_rng.set_stream(ARRIVAL_STREAM);

    let sizes: Vec<(u32, u32, Option<f64>)> = match &config.workload {
        WorkloadSource::Histogram(h) => {
            let buckets: Vec<BucketId> = grid.buckets().filter(|&b| h.rate(b) > 0.0).collect();
            let cumulative: Vec<f64> = buckets
                .iter()
                .scan(0.0, |acc, &b| {
                    *acc += h.rate(b);
                    Some(*acc)
                })
                .collect();
            let total = *cumulative.last().expect("non-empty histogram");
            (0..n)
                .map(|_| {
                    let u = size_rng.random::<f64>() * total;
                    let k = cumulative.partition_point(|&c| c <= u).min(buckets.len() - 1);
                    let (ib, ob) = buckets[k];
                    let (ilo, ihi) = grid.input_range(ib);
                    let (olo, ohi) = grid.output_range(ob);
                    let input = size_rng.random_range(ilo + 1..=ihi);
                    let output = size_rng.random_range(olo + 1..=ohi);
                    (input, output, None)
                })
                .collect()
        }
        WorkloadSource::Trace(records) => match config.arrival {
            Arrival::TraceReplay => {
                let mut ordered: Vec<&RequestRecord> = records.iter().collect();
                ordered.sort_by(|a, b| {
                    a.arrival_time
                        .unwrap_or(0.0)
                        .total_cmp(&b.arrival_time.unwrap_or(0.0))
                });
                ordered
                    .into_iter()
                    .take(n)
                    .map(|r| (r.input_tokens, r.output_tokens, r.arrival_time))
                    .collect()
            }
            Arrival::Poisson { .. } => (0..n)
                .map(|_| {
                    let r = &records[size_rng.random_range(0..records.len())];
                    (r.input_tokens, r.output_tokens, None)
                })
                .collect(),
        },
    };

    let mut clock = 0.0;
    sizes
        .into_iter()
        .enumerate()
        .map(|(id, (input, output, at))| {
            if grid.bucket_of(input, output).is_none() {
                return Err(Error::RecordOutOfGrid {
                    index: id,
                    input_tokens: input,
                    output_tokens: output,
                });
            }
            let arrival = match (config.arrival, at) {
                (Arrival::Poisson { rate }, _) => {
                    let gap: f64 = Exp1.sample(&mut arrival_rng);
                    clock += gap / rate;
                    clock
                }
                (Arrival::TraceReplay, t) => t.unwrap_or(0.0),
            };
            Ok(Pending {
                arrival,
                input,
                output,
            })
        })
        .collect()
}

/// Runs one simulation to completion of every request.
pub fn run(config: &SimConfig) -> Result<SimResult> {
    let profile_of = validate(config)?;
    let grid = config.profiles[profile_of.iter().copied().find(|&k| k != usize::MAX).unwrap()]
        .grid
        .clone();
    let requests = generate(config, &grid)?;
    let mut routing_rng = ChaCha8Rng::seed_from_u64(config.seed);
    routing_rng.set_stream(ROUTING_STREAM);

    let alloc = &config.allocation;
    let mut instances: Vec<Instance> = Vec::new();
    let mut instance_names = Vec::new();
    for (j, &count) in alloc.counts.iter().enumerate() {
        for _ in 0..count {
            let gpu = &config.profiles[profile_of[j]].gpu;
            instances.push(Instance {
                kind: profile_of[j],
                fixed_s: config.model.fixed_step_s(gpu),
                running: Vec::new(),
                waiting: Vec::new(),
                busy: false,
            });
            instance_names.push(alloc.gpu_names[j].clone());
        }
    }
    let instance_profiles: Vec<&ThroughputProfile> =
        instances.iter().map(|i| &config.profiles[i.kind]).collect();

    let mut outcomes: Vec<RequestOutcome> = requests
        .iter()
        .enumerate()
        .map(|(id, r)| RequestOutcome {
            id,
            arrival_s: r.arrival,
            input_tokens: r.input,
            output_tokens: r.output,
            instance: None,
            tpot_ms: None,
            ttft_ms: None,
        })
        .collect();

    let mut lb = LbState::new(grid.clone());
    let mut events = BinaryHeap::new();
    let mut seq = 0u64;
    for (id, r) in requests.iter().enumerate() {
        events.push(Event {
            time: r.arrival,
            seq,
            kind: EventKind::Arrival(id),
        });
        seq += 1;
    }

    let (mut arrived, mut completed, mut dropped, mut in_system) = (0usize, 0usize, 0usize, 0usize);
    let mut now = 0.0;
    while let Some(event) = events.pop() {
        now = event.time;
        let mut start_step: Option<usize> = None;
        match event.kind {
            EventKind::Arrival(id) => {
                arrived += 1;
                let req = &requests[id];
                let bucket = estimate_bucket(&lb, req.input)?;
                match route(bucket, &instance_profiles, &mut routing_rng) {
                    Ok(g) => {
                        in_system += 1;
                        outcomes[id].instance = Some(g);
                        instances[g].waiting.push(id);
                        if !instances[g].busy {
                            start_step = Some(g);
                        }
                    }
                    Err(Error::NoFeasibleInstance(_)) => dropped += 1,
                    Err(e) => return Err(e),
                }
            }
            EventKind::StepEnd(g) => {
                let inst = &mut instances[g];
                inst.busy = false;
                let mut still = Vec::with_capacity(inst.running.len());
                for mut a in inst.running.drain(..) {
                    a.remaining -= 1;
                    if a.remaining == 0 {
                        let req = &requests[a.id];
                        outcomes[a.id].tpot_ms =
                            Some((now - a.decode_start) / f64::from(req.output) * 1e3);
                        lb.observe(req.input, req.output);
                        completed += 1;
                        in_system -= 1;
                    } else {
                        still.push(a);
                    }
                }
                inst.running = still;
                if !inst.running.is_empty() || !inst.waiting.is_empty() {
                    start_step = Some(g);
                }
            }
        }

        if let Some(g) = start_step {
            let gpu = &config.profiles[instances[g].kind].gpu;
            let inst = &mut instances[g];
            let joining: Vec<usize> = std::mem::take(&mut inst.waiting);
            for id in &joining {
                let req = &requests[*id];
                inst.running.push(Active {
                    id: *id,
                    remaining: req.output,
                    decode_start: now,
                    step_cost_s: config.model.per_request_step_s(
                        gpu,
                        f64::from(req.input),
                        f64::from(req.output),
                    ),
                });
            }
            let step = inst.fixed_s + inst.running.iter().map(|a| a.step_cost_s).sum::<f64>();
            for id in joining {
                let req = &requests[id];
                outcomes[id].ttft_ms = Some(
                    (now - req.arrival + step * config.model.prefill_factor(f64::from(req.input)))
                        * 1e3,
                );
            }
            inst.busy = true;
            events.push(Event {
                time: now + step,
                seq,
                kind: EventKind::StepEnd(g),
            });
            seq += 1;
        }

        let queued: usize = instances
            .iter()
            .map(|i| i.running.len() + i.waiting.len())
            .sum();
        assert_eq!(queued, in_system, "in-flight bookkeeping diverged");
        assert_eq!(
            completed + in_system + dropped,
            arrived,
            "request conservation violated"
        );
    }

    let mut result = SimResult {
        outcomes,
        instances: instance_names,
        completed,
        dropped,
        slo_tpot_ms: config.slo_tpot_ms,
        attainment: 0.0,
        makespan_s: now,
    };
    result.attainment = slo_attainment(&result, config.slo_tpot_ms)?;
    Ok(result)
}
