//! Constraint checker for allocations, written against the integer program's
//! definition rather than any solver internals.

use super::{Allocation, IlpInstance, LOAD_UNITS};

/// Returns every violated constraint as a human-readable message; an empty
/// list means the allocation is valid for `instance`.
pub fn check_allocation(instance: &IlpInstance, alloc: &Allocation) -> Vec<String> {
    let mut violations = Vec::new();
    let n = instance.n_slices();
    let m = instance.n_gpu_types();
    if alloc.counts.len() != m {
        violations.push(format!("expected {m} counts, found {}", alloc.counts.len()));
        return violations;
    }
    let matrix = alloc.assignment_matrix();
    if matrix.len() != n {
        violations.push(format!("expected {n} assignment rows, found {}", matrix.len()));
        return violations;
    }

    let mut column = vec![0u128; m];
    for (i, row) in matrix.iter().enumerate() {
        if row.iter().any(|&a| a > 1) {
            violations.push(format!("slice {i}: assignment entries must be 0 or 1"));
        }
        let assigned: u32 = row.iter().map(|&a| u32::from(a)).sum();
        if assigned != 1 {
            violations.push(format!("slice {i}: assigned to {assigned} types"));
        }
        for (j, &a) in row.iter().enumerate() {
            if a == 0 {
                continue;
            }
            match instance.load_units(i, j) {
                Some(u) => column[j] += u128::from(u),
                None => violations.push(format!("slice {i}: forbidden type {j}")),
            }
        }
    }

    for j in 0..m {
        let capacity = u128::from(alloc.counts[j]) * u128::from(LOAD_UNITS);
        if column[j] > capacity {
            violations.push(format!(
                "type {j}: load {:.9} exceeds {} instances",
                column[j] as f64 / LOAD_UNITS as f64,
                alloc.counts[j]
            ));
        }
    }

    let cost: i128 = alloc
        .counts
        .iter()
        .zip(instance.cost_micros())
        .map(|(&b, &c)| i128::from(b) * i128::from(c))
        .sum();
    if cost != i128::from(alloc.total_cost_micros) {
        violations.push(format!(
            "total cost {} micro$ does not match counts ({cost} micro$)",
            alloc.total_cost_micros
        ));
    }
    if (alloc.total_cost - cost as f64 / 1e6).abs() > 1e-9 * (1.0 + alloc.total_cost.abs()) {
        violations.push("total_cost disagrees with total_cost_micros".into());
    }
    violations
}
