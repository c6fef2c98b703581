//! GPU types, SLO-constrained throughput profiles, slice loads, and the
//! tokens-per-dollar cost-efficiency metric.
//!
//! Profiles come from one of two places: [`synth_profile`], a closed-form
//! roofline-style decode model, or [`import_profile`], which loads externally
//! measured tables. The synthetic constants are calibrated only to reproduce
//! qualitative cost-efficiency trends (cheap GPUs win on small requests at
//! loose SLOs, large GPUs win on large requests and tight SLOs); they are not
//! measurements.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{BucketId, Error, Result};
use crate::workload::{BucketGrid, Slice};

pub const PROFILE_SCHEMA_VERSION: u32 = 1;
pub const REGISTRY_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
pub struct GpuType {
    pub name: String,
    /// On-demand price in $/hr.
    pub hourly_cost: f64,
    pub mem_gb: f64,
    pub mem_bw_gbs: f64,
    pub fp16_tflops: f64,
    /// Largest `input + output` token count this GPU is allowed to serve.
    #[serde(default)]
    pub max_request_tokens: Option<u32>,
}

impl GpuType {
    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v > 0.0 && v.is_finite();
        if self.name.is_empty() {
            return Err(Error::InvalidInput("GPU name is empty".into()));
        }
        if !positive(self.hourly_cost) || !positive(self.mem_gb) || !positive(self.mem_bw_gbs) {
            return Err(Error::InvalidInput(format!(
                "{}: hourly_cost, mem_gb and mem_bw_gbs must be positive",
                self.name
            )));
        }
        if !positive(self.fp16_tflops) {
            return Err(Error::InvalidInput(format!(
                "{}: fp16_tflops must be positive",
                self.name
            )));
        }
        if self.max_request_tokens == Some(0) {
            return Err(Error::InvalidInput(format!(
                "{}: max_request_tokens must be positive",
                self.name
            )));
        }
        Ok(())
    }

    /// `count` GPUs of this type treated as one serving unit (e.g. `H100x2`).
    pub fn replicated(&self, count: u32) -> GpuType {
        let k = f64::from(count);
        GpuType {
            name: format!("{}x{}", self.name, count),
            hourly_cost: self.hourly_cost * k,
            mem_gb: self.mem_gb * k,
            mem_bw_gbs: self.mem_bw_gbs * k,
            fp16_tflops: self.fp16_tflops * k,
            max_request_tokens: self.max_request_tokens,
        }
    }

    fn serves(&self, total_tokens: f64) -> bool {
        self.max_request_tokens
            .is_none_or(|cap| total_tokens <= f64::from(cap))
    }
}

/// Price of a target GPU on a second provider, scaled by the price ratio of
/// a reference GPU between the two.
pub fn normalize_price(
    reference_price_a: f64,
    reference_price_b: f64,
    target_price_b: f64,
) -> Result<f64> {
    for p in [reference_price_a, reference_price_b, target_price_b] {
        if !(p > 0.0 && p.is_finite()) {
            return Err(Error::InvalidInput(format!("price must be positive, got {p}")));
        }
    }
    Ok(reference_price_a / reference_price_b * target_price_b)
}

/// The four-GPU fleet used throughout the evaluation presets.
pub fn default_fleet() -> Vec<GpuType> {
    let gpu = |name: &str, cost, mem, bw, tflops, cap| GpuType {
        name: name.to_string(),
        hourly_cost: cost,
        mem_gb: mem,
        mem_bw_gbs: bw,
        fp16_tflops: tflops,
        max_request_tokens: cap,
    };
    vec![
        gpu("L4", 0.70, 24.0, 300.0, 242.0, Some(12000)),
        gpu("A10G", 1.01, 24.0, 600.0, 125.0, Some(12000)),
        gpu("A100", 3.67, 80.0, 1935.0, 312.0, None),
        gpu("H100", 7.516, 80.0, 3350.0, 1979.0, None),
    ]
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
pub struct GpuRegistry {
    pub schema_version: u32,
    pub gpus: Vec<GpuType>,
}

impl Default for GpuRegistry {
    fn default() -> Self {
        Self {
            schema_version: REGISTRY_SCHEMA_VERSION,
            gpus: default_fleet(),
        }
    }
}

impl GpuRegistry {
    pub fn from_json(text: &str) -> Result<Self> {
        let reg: GpuRegistry = serde_json::from_str(text)?;
        if reg.schema_version != REGISTRY_SCHEMA_VERSION {
            return Err(Error::Schema(format!(
                "unsupported registry schema_version {}",
                reg.schema_version
            )));
        }
        if reg.gpus.is_empty() {
            return Err(Error::Schema("registry lists no GPUs".into()));
        }
        for gpu in &reg.gpus {
            gpu.validate().map_err(|e| Error::Schema(e.to_string()))?;
        }
        let mut names: Vec<&str> = reg.gpus.iter().map(|g| g.name.as_str()).collect();
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Schema("duplicate GPU names in registry".into()));
        }
        Ok(reg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Model-side constants for the synthetic decode model.
#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
pub struct ModelParams {
    pub name: String,
    /// Parameter count.
    pub params: f64,
    pub weight_bytes: f64,
    pub kv_bytes_per_token: f64,
    /// Fixed per-decode-step overhead (kernel launches, scheduling), ms.
    pub step_overhead_ms: f64,
    /// Fraction of prefill compute charged to each decode step.
    pub prefill_interference: f64,
    /// Scheduler cap on concurrently running sequences.
    pub max_batch: u32,
    /// Prompt tokens processed per prefill step when deriving TTFT.
    pub prefill_chunk_tokens: u32,
}

impl ModelParams {
    /// A 7B-parameter fp16 decoder with a 32-layer, 4096-wide KV cache.
    pub fn llama2_7b() -> Self {
        Self {
            name: "llama2-7b".into(),
            params: 6.74e9,
            weight_bytes: 13.48e9,
            kv_bytes_per_token: 524_288.0,
            step_overhead_ms: 6.0,
            prefill_interference: 0.002,
            max_batch: 256,
            prefill_chunk_tokens: 512,
        }
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "llama2-7b" => Ok(Self::llama2_7b()),
            other => Err(Error::InvalidInput(format!("unknown model preset {other:?}"))),
        }
    }

    pub fn fits_on(&self, gpu: &GpuType) -> bool {
        self.weight_bytes < gpu.mem_gb * 1e9
    }

    /// Step-time component shared by the whole batch, in seconds.
    pub fn fixed_step_s(&self, gpu: &GpuType) -> f64 {
        self.step_overhead_ms / 1e3 + self.weight_bytes / (gpu.mem_bw_gbs * 1e9)
    }

    /// Step-time component added by one in-flight request of the given size,
    /// in seconds: its KV-cache read plus its amortized prefill compute.
    pub fn per_request_step_s(&self, gpu: &GpuType, input: f64, output: f64) -> f64 {
        self.kv_bytes_per_token * (input + output / 2.0) / (gpu.mem_bw_gbs * 1e9)
            + 2.0 * self.params * input * self.prefill_interference / (gpu.fp16_tflops * 1e12)
    }

    /// Decode step time with `n` identical requests in flight, seconds.
    pub fn step_time_s(&self, gpu: &GpuType, input: f64, output: f64, n: u32) -> f64 {
        self.fixed_step_s(gpu) + f64::from(n) * self.per_request_step_s(gpu, input, output)
    }

    /// Largest batch whose KV cache fits next to the weights, capped by
    /// `max_batch`.
    pub fn max_batch_for(&self, gpu: &GpuType, input: f64, output: f64) -> u32 {
        let free = gpu.mem_gb * 1e9 - self.weight_bytes;
        if free <= 0.0 {
            return 0;
        }
        let by_memory = (free / ((input + output) * self.kv_bytes_per_token)).floor();
        by_memory.min(f64::from(self.max_batch)) as u32
    }

    /// Number of prefill steps charged before the first token.
    pub fn prefill_factor(&self, input: f64) -> f64 {
        (input / f64::from(self.prefill_chunk_tokens.max(1))).ceil().max(1.0)
    }
}

/// MaxTput per bucket for one GPU type at one TPOT SLO. `None` marks a bucket
/// the GPU cannot serve within the SLO.
#[derive(Debug, Clone, PartialEq)]
pub struct ThroughputProfile {
    pub gpu: GpuType,
    pub slo_tpot_ms: f64,
    pub grid: BucketGrid,
    max_tput: Vec<Option<f64>>,
    /// False when the model weights do not fit in GPU memory.
    pub model_fits: bool,
}

#[derive(Deserialize, Serialize)]
struct ProfileFile {
    schema_version: u32,
    gpu: GpuType,
    slo_tpot_ms: f64,
    grid: BucketGrid,
    max_tput: Vec<Option<f64>>,
    #[serde(default = "yes", skip_serializing_if = "is_true")]
    model_fits: bool,
}

fn yes() -> bool {
    true
}

fn is_true(v: &bool) -> bool {
    *v
}

impl ThroughputProfile {
    /// Builds a profile from a row-major table, validating every entry.
    pub fn new(
        gpu: GpuType,
        slo_tpot_ms: f64,
        grid: BucketGrid,
        max_tput: Vec<Option<f64>>,
    ) -> Result<Self> {
        gpu.validate().map_err(|e| Error::Schema(e.to_string()))?;
        if !(slo_tpot_ms > 0.0 && slo_tpot_ms.is_finite()) {
            return Err(Error::Schema("slo_tpot_ms must be positive".into()));
        }
        if max_tput.len() != grid.n_buckets() {
            return Err(Error::GridMismatch(format!(
                "max_tput has {} entries, grid declares {} buckets",
                max_tput.len(),
                grid.n_buckets()
            )));
        }
        for (bucket, entry) in grid.buckets().zip(&max_tput) {
            let Some(v) = *entry else { continue };
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Schema(format!(
                    "bucket {bucket:?}: throughput must be positive, got {v}"
                )));
            }
            let (i, o) = grid.representative(bucket);
            if !gpu.serves(i + o) {
                return Err(Error::Schema(format!(
                    "bucket {bucket:?}: exceeds {} max_request_tokens but has a throughput",
                    gpu.name
                )));
            }
        }
        Ok(Self {
            gpu,
            slo_tpot_ms,
            grid,
            max_tput,
            model_fits: true,
        })
    }

    pub fn max_tput(&self, bucket: BucketId) -> Option<f64> {
        self.max_tput[self.grid.flat_index(bucket)]
    }

    pub fn entries(&self) -> &[Option<f64>] {
        &self.max_tput
    }

    pub fn feasible_buckets(&self) -> usize {
        self.max_tput.iter().filter(|e| e.is_some()).count()
    }

    /// Copy with every throughput multiplied by `factor` (used to model a
    /// tighter SLO or a slower GPU).
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        let entries = self.max_tput.iter().map(|e| e.map(|v| v * factor)).collect();
        Self::new(self.gpu.clone(), self.slo_tpot_ms, self.grid.clone(), entries)
    }

    pub fn to_json(&self) -> Result<String> {
        let file = ProfileFile {
            schema_version: PROFILE_SCHEMA_VERSION,
            gpu: self.gpu.clone(),
            slo_tpot_ms: self.slo_tpot_ms,
            grid: self.grid.clone(),
            max_tput: self.max_tput.clone(),
            model_fits: self.model_fits,
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ProfileFile =
            serde_json::from_str(text).map_err(|e| Error::Schema(e.to_string()))?;
        if file.schema_version != PROFILE_SCHEMA_VERSION {
            return Err(Error::Schema(format!(
                "unsupported profile schema_version {}",
                file.schema_version
            )));
        }
        let grid = BucketGrid::new(
            file.grid.input_edges().to_vec(),
            file.grid.output_edges().to_vec(),
        )
        .map_err(|e| Error::Schema(e.to_string()))?;
        let mut profile = Self::new(file.gpu, file.slo_tpot_ms, grid, file.max_tput)?;
        profile.model_fits = file.model_fits;
        Ok(profile)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }
}

pub fn import_profile(path: impl AsRef<Path>) -> Result<ThroughputProfile> {
    ThroughputProfile::from_json(&std::fs::read_to_string(path)?)
}

/// Derives MaxTput for every bucket from the analytical decode model.
///
/// For each bucket the largest batch `n <= max_batch_for` with
/// `step_time_s(n) <= slo` is found by bisection; MaxTput is then
/// `n / (output * step_time_s(n))`.
pub fn synth_profile(
    gpu: &GpuType,
    model: &ModelParams,
    grid: &BucketGrid,
    slo_tpot_ms: f64,
) -> Result<ThroughputProfile> {
    gpu.validate()?;
    if !(slo_tpot_ms > 0.0 && slo_tpot_ms.is_finite()) {
        return Err(Error::InvalidInput("slo_tpot_ms must be positive".into()));
    }
    let fits = model.fits_on(gpu);
    let slo = slo_tpot_ms / 1e3;
    let entries = grid
        .buckets()
        .map(|bucket| {
            if !fits {
                return None;
            }
            let (i, o) = grid.representative(bucket);
            if !gpu.serves(i + o) {
                return None;
            }
            let cap = model.max_batch_for(gpu, i, o);
            if cap < 1 || model.step_time_s(gpu, i, o, 1) > slo {
                return None;
            }
            let (mut lo, mut hi) = (1u32, cap);
            while lo < hi {
                let mid = lo + (hi - lo).div_ceil(2);
                if model.step_time_s(gpu, i, o, mid) <= slo {
                    lo = mid;
                } else {
                    hi = mid - 1;
                }
            }
            Some(f64::from(lo) / (o * model.step_time_s(gpu, i, o, lo)))
        })
        .collect();
    let mut profile = ThroughputProfile::new(gpu.clone(), slo_tpot_ms, grid.clone(), entries)?;
    profile.model_fits = fits;
    if !fits {
        log::warn!("{} weights do not fit on {}", model.name, gpu.name);
    }
    Ok(profile)
}

/// Input plus output tokens served per dollar on a feasible bucket.
pub fn tokens_per_dollar(profile: &ThroughputProfile, bucket: BucketId) -> Result<f64> {
    let tput = profile
        .max_tput(bucket)
        .ok_or_else(|| Error::InfeasibleBucket(bucket, profile.gpu.name.clone()))?;
    let (i, o) = profile.grid.representative(bucket);
    Ok(tput * (i + o) * 3600.0 / profile.gpu.hourly_cost)
}

/// Fractional load of each slice (rows) on one instance of each GPU type
/// (columns); `None` marks an infeasible pairing.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadMatrix {
    pub entries: Vec<Vec<Option<f64>>>,
    pub slices: Vec<Slice>,
    pub gpus: Vec<GpuType>,
}

impl LoadMatrix {
    pub fn n_slices(&self) -> usize {
        self.entries.len()
    }

    pub fn n_gpu_types(&self) -> usize {
        self.gpus.len()
    }

    pub fn get(&self, slice: usize, gpu: usize) -> Option<f64> {
        self.entries[slice][gpu]
    }
}

pub fn load_matrix(slices: &[Slice], profiles: &[ThroughputProfile]) -> Result<LoadMatrix> {
    let first = profiles
        .first()
        .ok_or_else(|| Error::InvalidInput("at least one profile is required".into()))?;
    for p in &profiles[1..] {
        if p.grid != first.grid {
            return Err(Error::GridMismatch(format!(
                "profile for {} uses a different grid than {}",
                p.gpu.name, first.gpu.name
            )));
        }
        if p.slo_tpot_ms != first.slo_tpot_ms {
            return Err(Error::GridMismatch(format!(
                "profile for {} is at SLO {} ms, expected {} ms",
                p.gpu.name, p.slo_tpot_ms, first.slo_tpot_ms
            )));
        }
    }
    let grid = &first.grid;
    let mut over_one = 0usize;
    let mut entries = Vec::with_capacity(slices.len());
    for s in slices {
        if s.bucket.0 >= grid.n_input() || s.bucket.1 >= grid.n_output() {
            return Err(Error::GridMismatch(format!(
                "slice bucket {:?} lies outside the profile grid",
                s.bucket
            )));
        }
        let row: Vec<Option<f64>> = profiles
            .iter()
            .map(|p| p.max_tput(s.bucket).map(|t| s.rate / t))
            .collect();
        if row.iter().flatten().any(|&l| l > 1.0) {
            over_one += 1;
        }
        entries.push(row);
    }
    if over_one > 0 {
        log::warn!(
            "{over_one} slices exceed one instance's capacity; consider a larger slice factor"
        );
    }
    Ok(LoadMatrix {
        entries,
        slices: slices.to_vec(),
        gpus: profiles.iter().map(|p| p.gpu.clone()).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flat_profile(name: &str, cost: f64, tput: f64) -> ThroughputProfile {
        let grid = BucketGrid::new(vec![100, 200], vec![100]).unwrap();
        let gpu = GpuType {
            name: name.into(),
            hourly_cost: cost,
            mem_gb: 24.0,
            mem_bw_gbs: 600.0,
            fp16_tflops: 100.0,
            max_request_tokens: None,
        };
        ThroughputProfile::new(gpu, 120.0, grid, vec![Some(tput), None]).unwrap()
    }

    #[test]
    fn price_normalization() {
        let h100 = normalize_price(4.69, 2.29, 3.67).unwrap();
        assert!((h100 - 7.516).abs() < 1e-3);
        assert_eq!(normalize_price(3.3, 3.3, 1.25).unwrap(), 1.25);
        assert_eq!(normalize_price(2.0, 1.0, 5.0).unwrap(), 10.0);
        assert!(normalize_price(0.0, 1.0, 1.0).is_err());
        assert!(normalize_price(1.0, -1.0, 1.0).is_err());
    }

    #[test]
    fn load_is_rate_over_tput() {
        let p = flat_profile("X", 1.0, 10.0);
        let slices = [
            Slice { bucket: (0, 0), part: 0, rate: 1.0 },
            Slice { bucket: (0, 0), part: 1, rate: 0.0 },
            Slice { bucket: (1, 0), part: 0, rate: 1.0 },
        ];
        let lm = load_matrix(&slices, &[p]).unwrap();
        assert_eq!(lm.get(0, 0), Some(0.1));
        assert_eq!(lm.get(1, 0), Some(0.0));
        assert_eq!(lm.get(2, 0), None);
    }

    #[test]
    fn load_matrix_rejects_mixed_slo() {
        let a = flat_profile("A", 1.0, 10.0);
        let mut b = flat_profile("B", 2.0, 10.0);
        b.slo_tpot_ms = 40.0;
        let s = [Slice { bucket: (0, 0), part: 0, rate: 1.0 }];
        assert!(matches!(load_matrix(&s, &[a, b]), Err(Error::GridMismatch(_))));
    }

    #[test]
    fn tokens_per_dollar_arithmetic() {
        let grid = BucketGrid::new(vec![200], vec![200]).unwrap();
        let mut gpu = default_fleet()[0].clone();
        gpu.hourly_cost = 1.0;
        let p = ThroughputProfile::new(gpu.clone(), 120.0, grid.clone(), vec![Some(1.0)]).unwrap();
        assert!((tokens_per_dollar(&p, (0, 0)).unwrap() - 720_000.0).abs() < 1e-6);
        gpu.hourly_cost = 2.0;
        let p2 = ThroughputProfile::new(gpu, 120.0, grid, vec![Some(1.0)]).unwrap();
        assert!((tokens_per_dollar(&p2, (0, 0)).unwrap() - 360_000.0).abs() < 1e-6);
        let infeasible = flat_profile("X", 1.0, 1.0);
        assert!(matches!(
            tokens_per_dollar(&infeasible, (1, 0)),
            Err(Error::InfeasibleBucket(..))
        ));
    }

    #[test]
    fn request_cap_makes_bucket_infeasible() {
        let fleet = default_fleet();
        let p = synth_profile(&fleet[0], &ModelParams::llama2_7b(), &BucketGrid::default(), 120.0)
            .unwrap();
        // (16000, 32000] input bucket midpoint is 24000 tokens.
        assert_eq!(p.max_tput((9, 0)), None);
        assert!(p.max_tput((0, 0)).is_some());
    }

    #[test]
    fn oversized_model_flags_profile() {
        let mut model = ModelParams::llama2_7b();
        model.weight_bytes = 30e9;
        let p = synth_profile(&default_fleet()[1], &model, &BucketGrid::default(), 120.0).unwrap();
        assert!(!p.model_fits);
        assert_eq!(p.feasible_buckets(), 0);
    }

    #[test]
    fn profile_validation_names_bucket() {
        let grid = BucketGrid::new(vec![100, 200], vec![100]).unwrap();
        let gpu = default_fleet()[2].clone();
        let err = ThroughputProfile::new(gpu.clone(), 120.0, grid.clone(), vec![Some(1.0), Some(-2.0)])
            .unwrap_err();
        assert!(err.to_string().contains("(1, 0)"), "{err}");
        assert!(ThroughputProfile::new(gpu, 120.0, grid, vec![Some(1.0)]).is_err());
    }

    #[test]
    fn registry_defaults() {
        let reg = GpuRegistry::default();
        let prices: Vec<f64> = reg.gpus.iter().map(|g| g.hourly_cost).collect();
        assert_eq!(prices, vec![0.70, 1.01, 3.67, 7.516]);
        let back = GpuRegistry::from_json(&reg.to_json().unwrap()).unwrap();
        assert_eq!(back, reg);
        let mut dup = reg.clone();
        dup.gpus.push(dup.gpus[0].clone());
        assert!(GpuRegistry::from_json(&dup.to_json().unwrap()).is_err());
    }

    #[test]
    fn replicated_gpu_doubles_price() {
        let h = &default_fleet()[3];
        let pair = h.replicated(2);
        assert_eq!(pair.name, "H100x2");
        assert_eq!(pair.hourly_cost, 2.0 * h.hourly_cost);
    }
}
