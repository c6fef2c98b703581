//! Exhaustive enumeration over every slice-to-type assignment. Used only to
//! verify the branch-and-bound solver on small instances.

use super::{IlpInstance, LOAD_UNITS};
use crate::allocator::Allocation;
use crate::error::{Error, Result};

/// Largest number of assignments the oracle will enumerate.
pub const ORACLE_LIMIT: f64 = 1e7;

pub fn brute_force_oracle(instance: &IlpInstance) -> Result<Allocation> {
    let n = instance.n_slices();
    let m = instance.n_gpu_types();
    let space = (m as f64).powi(n as i32);
    if space > ORACLE_LIMIT {
        return Err(Error::TooLarge(space));
    }
    if n == 0 {
        return Ok(Allocation::empty(instance.gpu_names().to_vec()));
    }
    let options: Vec<Vec<(usize, u64)>> = (0..n)
        .map(|i| {
            (0..m)
                .filter_map(|j| instance.load_units(i, j).map(|u| (j, u)))
                .collect()
        })
        .collect();

    // Odometer over per-slice option indices.
    let mut digits = vec![0usize; n];
    let mut best: Option<(i64, Vec<u32>, Vec<usize>)> = None;
    loop {
        let mut col = vec![0u64; m];
        for (i, &d) in digits.iter().enumerate() {
            let (j, u) = options[i][d];
            col[j] += u;
        }
        let counts: Vec<u32> = col.iter().map(|&u| u.div_ceil(LOAD_UNITS) as u32).collect();
        let cost: i64 = counts
            .iter()
            .zip(instance.cost_micros())
            .map(|(&b, &c)| i64::from(b) * c)
            .sum();
        let better = match &best {
            None => true,
            Some((bc, bb, _)) => cost < *bc || (cost == *bc && counts < *bb),
        };
        if better {
            let assignment = digits.iter().enumerate().map(|(i, &d)| options[i][d].0).collect();
            best = Some((cost, counts, assignment));
        }

        let mut pos = 0;
        loop {
            if pos == n {
                let (cost, counts, assignment) = best.expect("at least one assignment");
                return Ok(Allocation {
                    gpu_names: instance.gpu_names().to_vec(),
                    counts,
                    assignment,
                    total_cost: cost as f64 / 1e6,
                    total_cost_micros: cost,
                    lower_bound: cost as f64 / 1e6,
                    proven_optimal: true,
                    nodes: space as u64,
                });
            }
            digits[pos] += 1;
            if digits[pos] < options[pos].len() {
                break;
            }
            digits[pos] = 0;
            pos += 1;
        }
    }
}
