//! Cost-aware bin packing of workload slices onto GPU types.
//!
//! Decision variables: an assignment of every slice to exactly one GPU type,
//! and an integer instance count per type. Each type's count must cover the
//! summed load of the slices assigned to it; the objective is total $/hr.
//!
//! Loads are quantized to integer nano-units and prices to integer
//! micro-dollars, so instance counts (`ceil` of summed loads) and costs are
//! computed exactly and two solvers can be compared with `==`.

mod bnb;
mod check;
pub mod lp;
mod oracle;

use serde::{Deserialize, Serialize};

use crate::error::{BucketId, Error, Result};
use crate::profiles::LoadMatrix;
use crate::workload::Slice;

pub use bnb::{solve_exact, solve_exact_with, SolverOptions};
pub use check::check_allocation;
pub use oracle::{brute_force_oracle, ORACLE_LIMIT};

/// Quantization step for loads: one instance equals this many units.
pub const LOAD_UNITS: u64 = 1_000_000_000;

pub(crate) fn quantize_load(load: f64) -> u64 {
    (load * LOAD_UNITS as f64).round_ties_even() as u64
}

pub(crate) fn price_micros(price: f64) -> i64 {
    (price * 1e6).round() as i64
}

/// Smallest instance count that covers `units` of quantized load.
pub(crate) fn instances_for(units: u64) -> u64 {
    units.div_ceil(LOAD_UNITS)
}

/// The integer program for one planning problem.
#[derive(Debug, Clone, PartialEq)]
pub struct IlpInstance {
    gpu_names: Vec<String>,
    costs: Vec<f64>,
    cost_micros: Vec<i64>,
    loads: Vec<Vec<Option<f64>>>,
    units: Vec<Vec<Option<u64>>>,
    buckets: Vec<BucketId>,
}

impl IlpInstance {
    /// Builds an instance from a raw load table (`None` = forbidden pair).
    /// Each slice is reported as its own bucket `(slice_index, 0)`.
    pub fn from_loads(
        gpu_names: Vec<String>,
        loads: Vec<Vec<Option<f64>>>,
        costs: Vec<f64>,
    ) -> Result<Self> {
        let buckets = (0..loads.len()).map(|i| (i, 0)).collect();
        Self::build(gpu_names, loads, costs, buckets)
    }

    fn build(
        gpu_names: Vec<String>,
        loads: Vec<Vec<Option<f64>>>,
        costs: Vec<f64>,
        buckets: Vec<BucketId>,
    ) -> Result<Self> {
        let m = costs.len();
        if gpu_names.len() != m {
            return Err(Error::InvalidInput(format!(
                "{} GPU names for {m} costs",
                gpu_names.len()
            )));
        }
        if costs.iter().any(|c| !(*c > 0.0 && c.is_finite())) {
            return Err(Error::InvalidInput("GPU costs must be positive".into()));
        }
        if loads.iter().any(|row| row.len() != m) {
            return Err(Error::InvalidInput(format!(
                "every load row must have {m} entries"
            )));
        }
        if loads
            .iter()
            .flatten()
            .flatten()
            .any(|l| !(*l >= 0.0 && l.is_finite()))
        {
            return Err(Error::InvalidInput("loads must be finite and non-negative".into()));
        }
        let mut stranded: Vec<BucketId> = loads
            .iter()
            .zip(&buckets)
            .filter(|(row, _)| row.iter().all(Option::is_none))
            .map(|(_, &b)| b)
            .collect();
        if !stranded.is_empty() {
            stranded.dedup();
            return Err(Error::GloballyInfeasible { buckets: stranded });
        }
        let units = loads
            .iter()
            .map(|row| row.iter().map(|l| l.map(quantize_load)).collect())
            .collect();
        Ok(Self {
            cost_micros: costs.iter().copied().map(price_micros).collect(),
            gpu_names,
            costs,
            loads,
            units,
            buckets,
        })
    }

    /// Number of slices (rows).
    pub fn n_slices(&self) -> usize {
        self.loads.len()
    }

    /// Number of GPU types (columns).
    pub fn n_gpu_types(&self) -> usize {
        self.costs.len()
    }

    pub fn gpu_names(&self) -> &[String] {
        &self.gpu_names
    }

    pub fn costs(&self) -> &[f64] {
        &self.costs
    }

    pub fn cost_micros(&self) -> &[i64] {
        &self.cost_micros
    }

    pub fn load(&self, slice: usize, gpu: usize) -> Option<f64> {
        self.loads[slice][gpu]
    }

    /// Quantized load in units of `1 / LOAD_UNITS` instances.
    pub fn load_units(&self, slice: usize, gpu: usize) -> Option<u64> {
        self.units[slice][gpu]
    }

    pub fn is_forbidden(&self, slice: usize, gpu: usize) -> bool {
        self.loads[slice][gpu].is_none()
    }

    pub fn forbidden_pairs(&self) -> Vec<(usize, usize)> {
        let m = self.n_gpu_types();
        (0..self.n_slices())
            .flat_map(|i| (0..m).map(move |j| (i, j)))
            .filter(|&(i, j)| self.is_forbidden(i, j))
            .collect()
    }

    pub fn bucket(&self, slice: usize) -> BucketId {
        self.buckets[slice]
    }

    /// Exact cost of a count vector in micro-dollars.
    pub fn cost_of(&self, counts: &[u32]) -> i64 {
        counts
            .iter()
            .zip(&self.cost_micros)
            .map(|(&b, &c)| i64::from(b) * c)
            .sum()
    }

    /// Same instance with every price multiplied by `factor`.
    pub fn with_scaled_costs(&self, factor: f64) -> Result<Self> {
        Self::build(
            self.gpu_names.clone(),
            self.loads.clone(),
            self.costs.iter().map(|c| c * factor).collect(),
            self.buckets.clone(),
        )
    }

    /// Builds an allocation from a per-slice type assignment, using the
    /// smallest counts that cover each type's load.
    pub(crate) fn allocation_from_assignment(&self, assignment: Vec<usize>) -> Allocation {
        let m = self.n_gpu_types();
        let mut used = vec![0u64; m];
        for (i, &j) in assignment.iter().enumerate() {
            used[j] += self.units[i][j].expect("assignment uses a feasible pair");
        }
        let counts: Vec<u32> = used.iter().map(|&u| instances_for(u) as u32).collect();
        let micros = self.cost_of(&counts);
        Allocation {
            gpu_names: self.gpu_names.clone(),
            counts,
            assignment,
            total_cost: micros as f64 / 1e6,
            total_cost_micros: micros,
            lower_bound: micros as f64 / 1e6,
            proven_optimal: false,
            nodes: 0,
        }
    }
}

/// Assembles the integer program from slices, their load matrix and prices.
pub fn formulate(slices: &[Slice], loads: &LoadMatrix, costs: &[f64]) -> Result<IlpInstance> {
    if slices.len() != loads.n_slices() {
        return Err(Error::InvalidInput(format!(
            "{} slices but the load matrix has {} rows",
            slices.len(),
            loads.n_slices()
        )));
    }
    if costs.len() != loads.n_gpu_types() {
        return Err(Error::InvalidInput(format!(
            "{} costs for {} GPU types",
            costs.len(),
            loads.n_gpu_types()
        )));
    }
    let names = loads.gpus.iter().map(|g| g.name.clone()).collect();
    let buckets = slices.iter().map(|s| s.bucket).collect();
    IlpInstance::build(names, loads.entries.clone(), costs.to_vec(), buckets)
}

/// Instance counts per GPU type plus the slice assignment that justifies
/// them.
#[derive(Debug, Clone, PartialEq)]
pub struct Allocation {
    pub gpu_names: Vec<String>,
    pub counts: Vec<u32>,
    /// GPU type index for every slice.
    pub assignment: Vec<usize>,
    pub total_cost: f64,
    pub total_cost_micros: i64,
    /// Largest proven lower bound on the optimal cost, $/hr.
    pub lower_bound: f64,
    pub proven_optimal: bool,
    /// Branch-and-bound nodes explored (zero for closed-form solvers).
    pub nodes: u64,
}

impl Allocation {
    pub fn empty(gpu_names: Vec<String>) -> Self {
        let m = gpu_names.len();
        Self {
            gpu_names,
            counts: vec![0; m],
            assignment: Vec::new(),
            total_cost: 0.0,
            total_cost_micros: 0,
            lower_bound: 0.0,
            proven_optimal: true,
            nodes: 0,
        }
    }

    /// The assignment as an N x M 0/1 matrix.
    pub fn assignment_matrix(&self) -> Vec<Vec<u8>> {
        let m = self.counts.len();
        self.assignment
            .iter()
            .map(|&j| (0..m).map(|k| u8::from(k == j)).collect())
            .collect()
    }

    pub fn total_instances(&self) -> u32 {
        self.counts.iter().sum()
    }

    pub fn report(&self, instance: &IlpInstance) -> AllocationReport {
        let m = self.counts.len();
        let mut buckets: Vec<BucketAssignment> = Vec::new();
        for (i, &j) in self.assignment.iter().enumerate() {
            let (ib, ob) = instance.bucket(i);
            match buckets
                .iter_mut()
                .find(|b| b.input_bucket == ib && b.output_bucket == ob)
            {
                Some(b) => b.slices_per_gpu[j] += 1,
                None => {
                    let mut slices_per_gpu = vec![0; m];
                    slices_per_gpu[j] = 1;
                    buckets.push(BucketAssignment {
                        input_bucket: ib,
                        output_bucket: ob,
                        slices_per_gpu,
                    });
                }
            }
        }
        AllocationReport {
            counts: self
                .gpu_names
                .iter()
                .zip(&self.counts)
                .zip(instance.costs())
                .map(|((gpu, &count), &hourly_cost)| GpuCount {
                    gpu: gpu.clone(),
                    count,
                    hourly_cost,
                })
                .collect(),
            total_cost: self.total_cost,
            lower_bound: self.lower_bound,
            proven_optimal: self.proven_optimal,
            nodes: self.nodes,
            buckets,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
pub struct GpuCount {
    pub gpu: String,
    pub count: u32,
    pub hourly_cost: f64,
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
pub struct BucketAssignment {
    pub input_bucket: usize,
    pub output_bucket: usize,
    pub slices_per_gpu: Vec<u32>,
}

/// Serialized form of an [`Allocation`].
#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
pub struct AllocationReport {
    pub counts: Vec<GpuCount>,
    pub total_cost: f64,
    pub lower_bound: f64,
    pub proven_optimal: bool,
    pub nodes: u64,
    pub buckets: Vec<BucketAssignment>,
}

impl AllocationReport {
    pub fn count_of(&self, gpu: &str) -> Option<u32> {
        self.counts.iter().find(|c| c.gpu == gpu).map(|c| c.count)
    }
}

/// Cheapest allocation that uses only GPU type `gpu`.
pub fn solve_single_type(instance: &IlpInstance, gpu: usize) -> Result<Allocation> {
    if gpu >= instance.n_gpu_types() {
        return Err(Error::InvalidInput(format!("no GPU type with index {gpu}")));
    }
    let mut blocked: Vec<BucketId> = (0..instance.n_slices())
        .filter(|&i| instance.is_forbidden(i, gpu))
        .map(|i| instance.bucket(i))
        .collect();
    if !blocked.is_empty() {
        blocked.dedup();
        return Err(Error::BaselineInfeasible {
            gpu: instance.gpu_names[gpu].clone(),
            buckets: blocked,
        });
    }
    let mut alloc = instance.allocation_from_assignment(vec![gpu; instance.n_slices()]);
    alloc.proven_optimal = true;
    Ok(alloc)
}

/// Percentage saved by `candidate_cost` relative to `baseline_cost`.
pub fn savings(candidate_cost: f64, baseline_cost: f64) -> Result<f64> {
    if !(baseline_cost > 0.0 && baseline_cost.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "baseline cost must be positive, got {baseline_cost}"
        )));
    }
    Ok(100.0 * (baseline_cost - candidate_cost) / baseline_cost)
}
