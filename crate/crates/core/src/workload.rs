//! Request traces, the bucketed workload histogram, and slicing.
//!
//! A workload is a 2-D histogram over (input length, output length). Each
//! bucket holds an aggregate request rate in req/s. Slicing splits every
//! non-empty bucket into `slice_factor` equal shares, which become the items
//! the allocator packs onto GPU types.

use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{BucketId, Error, Result};

pub const HISTOGRAM_SCHEMA_VERSION: u32 = 1;

/// Default input-length bucket upper edges (tokens).
pub const DEFAULT_INPUT_EDGES: [u32; 10] =
    [25, 100, 250, 500, 1000, 2000, 4000, 8000, 16000, 32000];
/// Default output-length bucket upper edges (tokens).
pub const DEFAULT_OUTPUT_EDGES: [u32; 6] = [25, 100, 250, 500, 1000, 2000];

#[derive(Debug, Clone, Copy, PartialEq, Deserialize, Serialize)]
pub struct RequestRecord {
    pub input_tokens: u32,
    pub output_tokens: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub arrival_time: Option<f64>,
}

impl RequestRecord {
    pub fn new(input_tokens: u32, output_tokens: u32) -> Self {
        Self {
            input_tokens,
            output_tokens,
            arrival_time: None,
        }
    }

    fn validate(&self, index: usize) -> Result<()> {
        if self.input_tokens == 0 || self.output_tokens == 0 {
            return Err(Error::InvalidInput(format!(
                "record {index}: token counts must be >= 1"
            )));
        }
        if let Some(t) = self.arrival_time {
            if !(t >= 0.0 && t.is_finite()) {
                return Err(Error::InvalidInput(format!(
                    "record {index}: arrival_time must be a non-negative number"
                )));
            }
        }
        Ok(())
    }
}

/// Bucket upper edges along both request dimensions.
///
/// A value `v` belongs to bucket `k` when `edge[k-1] < v <= edge[k]`; the
/// first bucket starts at zero.
#[derive(Debug, Clone, PartialEq, Eq, Deserialize, Serialize)]
pub struct BucketGrid {
    input_edges: Vec<u32>,
    output_edges: Vec<u32>,
}

impl Default for BucketGrid {
    fn default() -> Self {
        Self {
            input_edges: DEFAULT_INPUT_EDGES.to_vec(),
            output_edges: DEFAULT_OUTPUT_EDGES.to_vec(),
        }
    }
}

fn check_edges(name: &str, edges: &[u32]) -> Result<()> {
    if edges.is_empty() {
        return Err(Error::InvalidInput(format!("{name} edges are empty")));
    }
    if edges[0] == 0 {
        return Err(Error::InvalidInput(format!("{name} edges must be positive")));
    }
    if edges.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidInput(format!(
            "{name} edges must be strictly increasing"
        )));
    }
    Ok(())
}

fn locate(edges: &[u32], value: f64) -> Option<usize> {
    if !(value > 0.0) {
        return None;
    }
    let k = edges.partition_point(|&e| f64::from(e) < value);
    (k < edges.len()).then_some(k)
}

fn range_of(edges: &[u32], k: usize) -> (u32, u32) {
    let lo = if k == 0 { 0 } else { edges[k - 1] };
    (lo, edges[k])
}

impl BucketGrid {
    pub fn new(input_edges: Vec<u32>, output_edges: Vec<u32>) -> Result<Self> {
        check_edges("input", &input_edges)?;
        check_edges("output", &output_edges)?;
        Ok(Self {
            input_edges,
            output_edges,
        })
    }

    pub fn input_edges(&self) -> &[u32] {
        &self.input_edges
    }

    pub fn output_edges(&self) -> &[u32] {
        &self.output_edges
    }

    pub fn n_input(&self) -> usize {
        self.input_edges.len()
    }

    pub fn n_output(&self) -> usize {
        self.output_edges.len()
    }

    pub fn n_buckets(&self) -> usize {
        self.n_input() * self.n_output()
    }

    pub fn max_input(&self) -> u32 {
        *self.input_edges.last().expect("validated grid")
    }

    pub fn max_output(&self) -> u32 {
        *self.output_edges.last().expect("validated grid")
    }

    pub fn input_bucket(&self, tokens: f64) -> Option<usize> {
        locate(&self.input_edges, tokens)
    }

    pub fn output_bucket(&self, tokens: f64) -> Option<usize> {
        locate(&self.output_edges, tokens)
    }

    pub fn bucket_of(&self, input_tokens: u32, output_tokens: u32) -> Option<BucketId> {
        Some((
            self.input_bucket(f64::from(input_tokens))?,
            self.output_bucket(f64::from(output_tokens))?,
        ))
    }

    /// Token range `(lower_exclusive, upper_inclusive)` of an input bucket.
    pub fn input_range(&self, k: usize) -> (u32, u32) {
        range_of(&self.input_edges, k)
    }

    pub fn output_range(&self, k: usize) -> (u32, u32) {
        range_of(&self.output_edges, k)
    }

    /// Midpoint request size of a bucket in tokens, `(input, output)`.
    pub fn representative(&self, bucket: BucketId) -> (f64, f64) {
        let (ilo, ihi) = self.input_range(bucket.0);
        let (olo, ohi) = self.output_range(bucket.1);
        (
            (f64::from(ilo) + f64::from(ihi)) / 2.0,
            (f64::from(olo) + f64::from(ohi)) / 2.0,
        )
    }

    /// Row-major iteration over all bucket coordinates.
    pub fn buckets(&self) -> impl Iterator<Item = BucketId> + '_ {
        let n_out = self.n_output();
        (0..self.n_buckets()).map(move |k| (k / n_out, k % n_out))
    }

    pub fn flat_index(&self, bucket: BucketId) -> usize {
        bucket.0 * self.n_output() + bucket.1
    }
}

/// Aggregate request rates (req/s) per bucket, indexed `[input][output]`.
#[derive(Debug, Clone, PartialEq)]
pub struct WorkloadHistogram {
    grid: BucketGrid,
    rates: Vec<Vec<f64>>,
    total_rate: f64,
}

#[derive(Deserialize, Serialize)]
struct HistogramFile {
    schema_version: u32,
    grid: BucketGrid,
    rates: Vec<Vec<f64>>,
    total_rate: f64,
}

impl WorkloadHistogram {
    /// Builds a histogram from an explicit rate matrix. `total_rate` is the sum
    /// of the matrix.
    pub fn from_rates(grid: BucketGrid, rates: Vec<Vec<f64>>) -> Result<Self> {
        if rates.len() != grid.n_input() || rates.iter().any(|r| r.len() != grid.n_output()) {
            return Err(Error::GridMismatch(format!(
                "rate matrix must be {}x{}",
                grid.n_input(),
                grid.n_output()
            )));
        }
        if rates.iter().flatten().any(|r| !(*r >= 0.0 && r.is_finite())) {
            return Err(Error::InvalidInput(
                "bucket rates must be finite and non-negative".into(),
            ));
        }
        let total_rate = rates.iter().flatten().sum();
        Ok(Self {
            grid,
            rates,
            total_rate,
        })
    }

    pub fn empty(grid: BucketGrid) -> Self {
        let rates = vec![vec![0.0; grid.n_output()]; grid.n_input()];
        Self {
            grid,
            rates,
            total_rate: 0.0,
        }
    }

    pub fn grid(&self) -> &BucketGrid {
        &self.grid
    }

    pub fn rates(&self) -> &[Vec<f64>] {
        &self.rates
    }

    pub fn rate(&self, bucket: BucketId) -> f64 {
        self.rates[bucket.0][bucket.1]
    }

    pub fn total_rate(&self) -> f64 {
        self.total_rate
    }

    pub fn non_empty_buckets(&self) -> usize {
        self.rates.iter().flatten().filter(|&&r| r > 0.0).count()
    }

    /// Share of the total rate held by each bucket (all zero for an empty
    /// histogram).
    pub fn shares(&self) -> Vec<Vec<f64>> {
        let sum: f64 = self.rates.iter().flatten().sum();
        self.rates
            .iter()
            .map(|row| {
                row.iter()
                    .map(|&r| if sum > 0.0 { r / sum } else { 0.0 })
                    .collect()
            })
            .collect()
    }

    pub fn to_json(&self) -> Result<String> {
        let file = HistogramFile {
            schema_version: HISTOGRAM_SCHEMA_VERSION,
            grid: self.grid.clone(),
            rates: self.rates.clone(),
            total_rate: self.total_rate,
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: HistogramFile = serde_json::from_str(text)?;
        if file.schema_version != HISTOGRAM_SCHEMA_VERSION {
            return Err(Error::Schema(format!(
                "unsupported histogram schema_version {}",
                file.schema_version
            )));
        }
        let grid = BucketGrid::new(file.grid.input_edges, file.grid.output_edges)?;
        let mut hist = Self::from_rates(grid, file.rates)?;
        let sum = hist.total_rate;
        if (file.total_rate - sum).abs() > 1e-9 * sum.max(1.0) {
            return Err(Error::Schema(format!(
                "total_rate {} does not match bucket sum {}",
                file.total_rate, sum
            )));
        }
        hist.total_rate = file.total_rate;
        Ok(hist)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }
}

/// One equal share of a bucket's rate; the indivisible item for bin packing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Slice {
    pub bucket: BucketId,
    pub part: u32,
    pub rate: f64,
}

/// Bins `records` onto `grid` and scales bucket shares to `total_rate`.
pub fn build_histogram(
    records: &[RequestRecord],
    grid: &BucketGrid,
    total_rate: f64,
) -> Result<WorkloadHistogram> {
    if !(total_rate > 0.0 && total_rate.is_finite()) {
        return Err(Error::InvalidInput("total_rate must be positive".into()));
    }
    if records.is_empty() {
        return Err(Error::EmptyTrace);
    }
    let mut counts = vec![vec![0u64; grid.n_output()]; grid.n_input()];
    for (index, rec) in records.iter().enumerate() {
        rec.validate(index)?;
        let (i, o) = grid
            .bucket_of(rec.input_tokens, rec.output_tokens)
            .ok_or(Error::RecordOutOfGrid {
                index,
                input_tokens: rec.input_tokens,
                output_tokens: rec.output_tokens,
            })?;
        counts[i][o] += 1;
    }
    let n = records.len() as f64;
    let rates = counts
        .into_iter()
        .map(|row| row.into_iter().map(|c| c as f64 / n * total_rate).collect())
        .collect();
    Ok(WorkloadHistogram {
        grid: grid.clone(),
        rates,
        total_rate,
    })
}

/// Splits each non-empty bucket into `slice_factor` equal slices, row-major by
/// bucket and then by slice index.
pub fn slice_workload(hist: &WorkloadHistogram, slice_factor: u32) -> Result<Vec<Slice>> {
    if slice_factor == 0 {
        return Err(Error::InvalidInput("slice_factor must be >= 1".into()));
    }
    let mut slices = Vec::with_capacity(hist.non_empty_buckets() * slice_factor as usize);
    for bucket in hist.grid.buckets() {
        let rate = hist.rate(bucket);
        if rate > 0.0 {
            let share = rate / f64::from(slice_factor);
            slices.extend((0..slice_factor).map(|part| Slice {
                bucket,
                part,
                rate: share,
            }));
        }
    }
    Ok(slices)
}

pub fn scale_rate(hist: &WorkloadHistogram, factor: f64) -> Result<WorkloadHistogram> {
    if !(factor > 0.0 && factor.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "scale factor must be positive, got {factor}"
        )));
    }
    Ok(WorkloadHistogram {
        grid: hist.grid.clone(),
        rates: hist
            .rates
            .iter()
            .map(|row| row.iter().map(|r| r * factor).collect())
            .collect(),
        total_rate: hist.total_rate * factor,
    })
}

/// Blends the bucket shares of two histograms on the same grid and rescales
/// the result to `total_rate`.
pub fn mix_histograms(
    a: &WorkloadHistogram,
    b: &WorkloadHistogram,
    weight_a: f64,
    total_rate: f64,
) -> Result<WorkloadHistogram> {
    if a.grid != b.grid {
        return Err(Error::GridMismatch(
            "histograms to mix must share one grid".into(),
        ));
    }
    if !(0.0..=1.0).contains(&weight_a) {
        return Err(Error::InvalidInput("weight_a must lie in [0, 1]".into()));
    }
    if !(total_rate >= 0.0 && total_rate.is_finite()) {
        return Err(Error::InvalidInput("total_rate must be non-negative".into()));
    }
    let (sa, sb) = (a.shares(), b.shares());
    let rates = sa
        .iter()
        .zip(&sb)
        .map(|(ra, rb)| {
            ra.iter()
                .zip(rb)
                .map(|(x, y)| (weight_a * x + (1.0 - weight_a) * y) * total_rate)
                .collect()
        })
        .collect();
    Ok(WorkloadHistogram {
        grid: a.grid.clone(),
        rates,
        total_rate,
    })
}

pub fn read_trace_from(reader: impl Read) -> Result<Vec<RequestRecord>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.get(0) != Some("input_tokens") || headers.get(1) != Some("output_tokens") {
        return Err(Error::Schema(
            "trace header must start with input_tokens,output_tokens".into(),
        ));
    }
    let mut records = Vec::new();
    for (index, row) in rdr.deserialize::<RequestRecord>().enumerate() {
        let rec = row?;
        rec.validate(index)?;
        records.push(rec);
    }
    Ok(records)
}

pub fn read_trace(path: impl AsRef<Path>) -> Result<Vec<RequestRecord>> {
    read_trace_from(std::fs::File::open(path)?)
}

const SHORT_FIXTURE: &str = include_str!("../fixtures/short.json");
const LONG_FIXTURE: &str = include_str!("../fixtures/long.json");

/// Named workload shapes: `short` (chat-like), `long` (summarization-like) and
/// `mixed-80-20` (80% short, 20% long by request share).
pub const PRESETS: [&str; 3] = ["short", "long", "mixed-80-20"];

pub fn preset(name: &str, total_rate: f64) -> Result<WorkloadHistogram> {
    let short = WorkloadHistogram::from_json(SHORT_FIXTURE)?;
    let long = WorkloadHistogram::from_json(LONG_FIXTURE)?;
    match name {
        "short" => mix_histograms(&short, &long, 1.0, total_rate),
        "long" => mix_histograms(&short, &long, 0.0, total_rate),
        "mixed-80-20" => mix_histograms(&short, &long, 0.8, total_rate),
        other => Err(Error::InvalidInput(format!(
            "unknown workload preset {other:?} (expected one of {PRESETS:?})"
        ))),
    }
}
