//! Cost-minimal heterogeneous GPU allocation for LLM serving.
//!
//! The pipeline runs bottom-up through four modules:
//!
//! - [`workload`]: trace ingestion, the request-size histogram, and slicing.
//! - [`profiles`]: GPU types, SLO-constrained throughput profiles, slice loads.
//! - [`allocator`]: the cost-aware bin-packing integer program and its exact
//!   solver, single-type baselines, and a brute-force oracle.
//! - [`simulator`]: a discrete-event replay of a provisioned fleet behind a
//!   weighted-random load balancer, reporting per-request TPOT.

pub mod allocator;
pub mod error;
pub mod profiles;
pub mod simulator;
pub mod workload;

pub use allocator::{
    brute_force_oracle, check_allocation, formulate, savings, solve_exact, solve_exact_with,
    solve_single_type, Allocation, IlpInstance, SolverOptions,
};
pub use error::{Error, Result};
pub use profiles::{
    import_profile, load_matrix, normalize_price, synth_profile, tokens_per_dollar, GpuRegistry,
    GpuType, LoadMatrix, ModelParams, ThroughputProfile,
};
pub use simulator::{estimate_bucket, route, run, slo_attainment, LbState, SimConfig, SimResult};
pub use workload::{
    build_histogram, mix_histograms, scale_rate, slice_workload, BucketGrid, RequestRecord, Slice,
    WorkloadHistogram,
};
