//! Exact branch-and-bound over the slice-packing integer program.
//!
//! The outer search branches on instance counts `B` only. Each node solves
//! the LP relaxation (slice assignments fractional) for a bound. When the LP
//! lands on integral counts, an exact packing check decides whether the
//! slices fit into exactly those instances. If they do, the node closes with
//! a new incumbent. If not, the node is split so that every count vector at
//! or below the failed one is excluded: fewer instances never fit what more
//! instances could not.
//!
//! Slices with identical load rows (all slices of one bucket) form groups, so
//! the LP works with per-group counts and the packing search breaks symmetry
//! inside each group.
//!
//! After the optimal cost is known, every lexicographically smaller count
//! vector with exactly that cost is checked, so the returned counts are the
//! lexicographic minimum among all optima.

use std::collections::HashMap;
use std::time::{Duration, Instant};

use super::lp::{Cmp, Lp, LpOutcome};
use super::{instances_for, Allocation, IlpInstance, LOAD_UNITS};
use crate::error::{Error, Result};

const INT_TOL: f64 = 1e-6;
/// Capacity slack (in instances) granted to LP feasibility checks, so float
/// error never prunes an exactly tight packing.
const LP_CAP_TOL: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct SolverOptions {
    /// Wall-clock budget; exceeding it is an error, never a partial answer.
    pub time_budget: Duration,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            time_budget: Duration::from_secs(60),
        }
    }
}

pub fn solve_exact(instance: &IlpInstance) -> Result<Allocation> {
    solve_exact_with(instance, &SolverOptions::default())
}

pub fn solve_exact_with(instance: &IlpInstance, options: &SolverOptions) -> Result<Allocation> {
    if instance.n_slices() == 0 {
        return Ok(Allocation::empty(instance.gpu_names().to_vec()));
    }
    let deadline = Deadline {
        start: Instant::now(),
        budget: options.time_budget,
    };
    let model = Model::new(instance);
    let mut search = Search::new(&model);
    search.optimize(&deadline)?;
    let (cost, counts, x) = search.incumbent.take().expect("baseline seeds an incumbent");

    let mut best = (counts, x);
    for candidate in model.equal_cost_below(cost, &best.0) {
        let caps: Vec<i64> = candidate.iter().map(|&b| i64::from(b)).collect();
        if let Some(x) = search.pack(&caps, &deadline)? {
            best = (candidate, x);
            break;
        }
    }
    let (counts, x) = best;

    let mut alloc = instance.allocation_from_assignment(model.expand(&x));
    debug_assert!(alloc.counts.iter().zip(&counts).all(|(a, b)| a <= b));
    alloc.counts = counts;
    alloc.total_cost_micros = model.cost_of(&alloc.counts);
    alloc.total_cost = alloc.total_cost_micros as f64 / 1e6;
    debug_assert_eq!(alloc.total_cost_micros, cost);
    alloc.lower_bound = search.root_bound.min(alloc.total_cost);
    alloc.proven_optimal = true;
    alloc.nodes = search.nodes;
    Ok(alloc)
}

struct Deadline {
    start: Instant,
    budget: Duration,
}

impl Deadline {
    fn check(&self) -> Result<()> {
        if self.start.elapsed() > self.budget {
            Err(Error::Timeout(self.budget))
        } else {
            Ok(())
        }
    }
}

struct Group {
    members: Vec<usize>,
    units: Vec<Option<u64>>,
}

impl Group {
    fn size(&self) -> i64 {
        self.members.len() as i64
    }
}

/// Per-group counts `x[g][j]`.
type GroupCounts = Vec<Vec<i64>>;

fn leq<T: PartialOrd>(a: &[T], b: &[T]) -> bool {
    a.iter().zip(b).all(|(x, y)| x <= y)
}

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a.abs()
    } else {
        gcd(b, a % b)
    }
}

struct Model {
    groups: Vec<Group>,
    m: usize,
    cost: Vec<f64>,
    micros: Vec<i64>,
    /// LP column of `x[g][j]`, if type `j` can serve group `g`.
    x_var: Vec<Vec<Option<usize>>>,
    /// LP column of `B[j]`, if any group can use type `j`.
    b_var: Vec<Option<usize>>,
    n_vars: usize,
    /// Smallest positive difference between two achievable costs.
    granularity: i64,
}

impl Model {
    fn new(instance: &IlpInstance) -> Self {
        let m = instance.n_gpu_types();
        let mut index: HashMap<Vec<Option<u64>>, usize> = HashMap::new();
        let mut groups: Vec<Group> = Vec::new();
        for i in 0..instance.n_slices() {
            let units: Vec<Option<u64>> = (0..m).map(|j| instance.load_units(i, j)).collect();
            match index.get(&units) {
                Some(&g) => groups[g].members.push(i),
                None => {
                    index.insert(units.clone(), groups.len());
                    groups.push(Group {
                        members: vec![i],
                        units,
                    });
                }
            }
        }

        let mut n_vars = 0;
        let mut x_var = vec![vec![None; m]; groups.len()];
        for (g, group) in groups.iter().enumerate() {
            for j in 0..m {
                if group.units[j].is_some() {
                    x_var[g][j] = Some(n_vars);
                    n_vars += 1;
                }
            }
        }
        let mut b_var = vec![None; m];
        for (j, slot) in b_var.iter_mut().enumerate() {
            if groups.iter().any(|g| g.units[j].is_some()) {
                *slot = Some(n_vars);
                n_vars += 1;
            }
        }
        let micros = instance.cost_micros().to_vec();
        let granularity = (0..m)
            .filter(|&j| b_var[j].is_some())
            .fold(0, |acc, j| gcd(acc, micros[j]))
            .max(1);
        Self {
            groups,
            m,
            cost: instance.costs().to_vec(),
            micros,
            x_var,
            b_var,
            n_vars,
            granularity,
        }
    }

    fn root(&self) -> Node {
        Node {
            lo: vec![0; self.m],
            hi: self
                .b_var
                .iter()
                .map(|v| if v.is_some() { i64::MAX } else { 0 })
                .collect(),
            parent_bound: f64::NEG_INFINITY,
        }
    }

    fn load(&self, g: usize, j: usize) -> f64 {
        self.groups[g].units[j].map_or(0.0, |u| u as f64 / LOAD_UNITS as f64)
    }

    /// LP relaxation at `node`: fractional counts `B` per type and the
    /// objective in $/hr.
    fn relax(&self, node: &Node) -> Option<(Vec<f64>, f64)> {
        if node.lo.iter().zip(&node.hi).any(|(lo, hi)| lo > hi) {
            return None;
        }
        // B[j] is shifted by its lower bound so all columns stay >= 0.
        let mut objective = vec![0.0; self.n_vars];
        let mut constant = 0.0;
        for j in 0..self.m {
            if let Some(v) = self.b_var[j] {
                objective[v] = self.cost[j];
                constant += self.cost[j] * node.lo[j] as f64;
            }
        }
        let mut lp = Lp::new(objective);
        for j in 0..self.m {
            if let Some(v) = self.b_var[j] {
                if node.hi[j] < i64::MAX {
                    lp.add_row(vec![(v, 1.0)], Cmp::Le, (node.hi[j] - node.lo[j]) as f64);
                }
            }
        }
        for (g, group) in self.groups.iter().enumerate() {
            let vars = self.x_var[g].iter().flatten().map(|&v| (v, 1.0)).collect();
            lp.add_row(vars, Cmp::Eq, group.size() as f64);
        }
        for j in 0..self.m {
            let Some(bv) = self.b_var[j] else { continue };
            let mut coeffs = vec![(bv, -1.0)];
            for g in 0..self.groups.len() {
                if let Some(v) = self.x_var[g][j] {
                    coeffs.push((v, self.load(g, j)));
                }
            }
            lp.add_row(coeffs, Cmp::Le, node.lo[j] as f64);
        }
        match lp.minimize() {
            LpOutcome::Optimal { x, objective } => {
                let b = (0..self.m)
                    .map(|j| self.b_var[j].map_or(0.0, |v| x[v] + node.lo[j] as f64))
                    .collect();
                Some((b, objective + constant))
            }
            LpOutcome::Infeasible | LpOutcome::Unbounded => None,
        }
    }

    /// Rounds fractional group counts (`frac[g][j]`) to integers. Leftover
    /// slices go to the type with the most room under `caps`.
    fn round(&self, frac: &[Vec<f64>], caps: &[i64]) -> GroupCounts {
        let mut used = vec![0i128; self.m];
        let mut x: GroupCounts = vec![vec![0; self.m]; self.groups.len()];
        for (g, group) in self.groups.iter().enumerate() {
            let mut total = 0;
            for j in 0..self.m {
                if group.units[j].is_some() {
                    x[g][j] = (frac[g][j] + INT_TOL).floor().max(0.0) as i64;
                    total += x[g][j];
                }
            }
            while total > group.size() {
                let j = (0..self.m).rev().find(|&j| x[g][j] > 0).expect("positive count");
                x[g][j] -= 1;
                total -= 1;
            }
            for j in 0..self.m {
                if let Some(u) = group.units[j] {
                    used[j] += i128::from(x[g][j]) * i128::from(u);
                }
            }
        }
        for (g, group) in self.groups.iter().enumerate() {
            let mut missing = group.size() - x[g].iter().sum::<i64>();
            while missing > 0 {
                let j = (0..self.m)
                    .filter_map(|j| group.units[j].map(|u| (j, u)))
                    .max_by_key(|&(j, u)| {
                        (
                            i128::from(caps[j]) * i128::from(LOAD_UNITS) - used[j] - i128::from(u),
                            std::cmp::Reverse(j),
                        )
                    })
                    .map(|(j, _)| j)
                    .expect("every group has a feasible type");
                x[g][j] += 1;
                used[j] += i128::from(group.units[j].expect("feasible"));
                missing -= 1;
            }
        }
        x
    }

    /// Fractional packing of `remaining[g]` slices of each group into
    /// `residual` load units per type, maximizing the smallest relative
    /// slack. Group `g` may only use types `>= min_type[g]`. `None` when not
    /// even a fractional packing exists.
    fn packing_lp(
        &self,
        remaining: &[i64],
        min_type: &[usize],
        residual: &[i128],
    ) -> Option<Vec<Vec<f64>>> {
        let mut col = vec![vec![None; self.m]; self.groups.len()];
        let mut n = 0;
        for (g, group) in self.groups.iter().enumerate() {
            if remaining[g] == 0 {
                continue;
            }
            for j in min_type[g]..self.m {
                if group.units[j].is_some() {
                    col[g][j] = Some(n);
                    n += 1;
                }
            }
        }
        let s = n;
        let mut objective = vec![0.0; n + 1];
        objective[s] = -1.0;
        let mut lp = Lp::new(objective);
        for (g, cols) in col.iter().enumerate() {
            if remaining[g] > 0 {
                let vars: Vec<(usize, f64)> = cols.iter().flatten().map(|&v| (v, 1.0)).collect();
                if vars.is_empty() {
                    return None;
                }
                lp.add_row(vars, Cmp::Eq, remaining[g] as f64);
            }
        }
        for j in 0..self.m {
            let mut coeffs: Vec<(usize, f64)> = (0..self.groups.len())
                .filter_map(|g| col[g][j].map(|v| (v, self.load(g, j))))
                .collect();
            if coeffs.is_empty() {
                continue;
            }
            let cap = residual[j] as f64 / LOAD_UNITS as f64;
            if cap > 0.0 {
                coeffs.push((s, cap));
            }
            lp.add_row(coeffs, Cmp::Le, cap + LP_CAP_TOL);
        }
        lp.add_row(vec![(s, 1.0)], Cmp::Le, 1.0);
        match lp.minimize() {
            LpOutcome::Optimal { x, .. } => Some(
                col.iter()
                    .map(|cols| cols.iter().map(|c| c.map_or(0.0, |v| x[v])).collect())
                    .collect(),
            ),
            LpOutcome::Infeasible | LpOutcome::Unbounded => None,
        }
    }

    fn capacity(&self, caps: &[i64]) -> Vec<i128> {
        caps.iter()
            .map(|&c| i128::from(c) * i128::from(LOAD_UNITS))
            .collect()
    }

    /// Packing heuristic for fixed instance counts: a dive over
    /// [`Model::packing_lp`] that commits one fractionally placed slice per
    /// step, largest load first, trying a rounding after every LP.
    fn fit(&self, caps: &[i64]) -> Option<GroupCounts> {
        let counts: Vec<u32> = caps.iter().map(|&c| c as u32).collect();
        let groups = self.groups.len();
        let zero = vec![0usize; groups];
        let mut fixed: GroupCounts = vec![vec![0; self.m]; groups];
        let mut remaining: Vec<i64> = self.groups.iter().map(Group::size).collect();
        let mut residual = self.capacity(caps);
        let mut frac = self.packing_lp(&remaining, &zero, &residual)?;
        for _ in 0..=self.n_vars {
            let total: Vec<Vec<f64>> = (0..groups)
                .map(|g| (0..self.m).map(|j| frac[g][j] + fixed[g][j] as f64).collect())
                .collect();
            let rounded = self.round(&total, caps);
            if self.fits(&rounded, &counts) {
                return Some(rounded);
            }
            let pick = (0..groups)
                .flat_map(|g| (0..self.m).map(move |j| (g, j)))
                .filter(|&(g, j)| {
                    let f = frac[g][j] - frac[g][j].floor();
                    f > INT_TOL && f < 1.0 - INT_TOL
                })
                .max_by_key(|&(g, j)| {
                    (self.groups[g].units[j].unwrap_or(0), std::cmp::Reverse((g, j)))
                });
            let (g, j) = pick?;
            let u = i128::from(self.groups[g].units[j].expect("feasible"));
            if residual[j] < u {
                return None;
            }
            // Commit whole slices up to the LP value, at least one.
            let take = (frac[g][j].ceil() as i64).clamp(1, remaining[g]);
            let take = (1..=take)
                .rev()
                .find(|&t| i128::from(t) * u <= residual[j])
                .unwrap_or(1);
            fixed[g][j] += take;
            remaining[g] -= take;
            residual[j] -= i128::from(take) * u;
            frac = self.packing_lp(&remaining, &zero, &residual)?;
        }
        None
    }

    fn counts_for(&self, x: &GroupCounts) -> Vec<u32> {
        (0..self.m)
            .map(|j| {
                let used: u64 = self
                    .groups
                    .iter()
                    .enumerate()
                    .filter_map(|(g, group)| group.units[j].map(|u| u * x[g][j] as u64))
                    .sum();
                instances_for(used) as u32
            })
            .collect()
    }

    fn cost_of(&self, counts: &[u32]) -> i64 {
        counts
            .iter()
            .zip(&self.micros)
            .map(|(&b, &c)| i64::from(b) * c)
            .sum()
    }

    fn fits(&self, x: &GroupCounts, counts: &[u32]) -> bool {
        x.iter().zip(&self.groups).all(|(row, g)| row.iter().sum::<i64>() == g.size())
            && leq(&self.counts_for(x), counts)
    }

    fn expand(&self, x: &GroupCounts) -> Vec<usize> {
        let n: usize = self.groups.iter().map(|g| g.members.len()).sum();
        let mut assignment = vec![0; n];
        for (g, group) in self.groups.iter().enumerate() {
            let mut members = group.members.iter();
            for j in 0..self.m {
                for _ in 0..x[g][j] {
                    assignment[*members.next().expect("counts match group size")] = j;
                }
            }
        }
        assignment
    }

    /// A starting incumbent: the best single-type allocation, or every group
    /// on its cheapest type per unit of load. The latter always exists, so
    /// the search never runs without a bound.
    fn baseline(&self) -> GroupCounts {
        let all_on = |pick: &dyn Fn(&Group) -> usize| -> GroupCounts {
            self.groups
                .iter()
                .map(|g| {
                    let j = pick(g);
                    (0..self.m).map(|k| if k == j { g.size() } else { 0 }).collect()
                })
                .collect()
        };
        let greedy = all_on(&|g: &Group| {
            (0..self.m)
                .filter_map(|j| g.units[j].map(|u| (i128::from(u) * i128::from(self.micros[j]), j)))
                .min()
                .expect("every group has a feasible type")
                .1
        });
        (0..self.m)
            .filter(|&j| self.groups.iter().all(|g| g.units[j].is_some()))
            .map(|j| all_on(&|_: &Group| j))
            .chain([greedy])
            .min_by_key(|x| {
                let counts = self.counts_for(x);
                (self.cost_of(&counts), counts)
            })
            .expect("greedy candidate")
    }

    /// Count vectors with cost exactly `cost` that are lexicographically
    /// smaller than `upper`, in increasing lexicographic order. Types that
    /// no slice can use stay at zero.
    fn equal_cost_below(&self, cost: i64, upper: &[u32]) -> Vec<Vec<u32>> {
        let mut out = Vec::new();
        let mut prefix = Vec::with_capacity(self.m);
        self.enumerate(0, cost, true, upper, &mut prefix, &mut out);
        out
    }

    fn enumerate(
        &self,
        j: usize,
        remaining: i64,
        tight: bool,
        upper: &[u32],
        prefix: &mut Vec<u32>,
        out: &mut Vec<Vec<u32>>,
    ) {
        if j == self.m {
            if remaining == 0 && !tight {
                out.push(prefix.clone());
            }
            return;
        }
        let max = if self.b_var[j].is_none() {
            0
        } else if (j + 1..self.m).all(|k| self.b_var[k].is_none()) {
            // Last usable type: its count is forced by the remaining cost.
            if remaining % self.micros[j] != 0 {
                return;
            }
            let v = remaining / self.micros[j];
            prefix.push(v as u32);
            if !tight || (v as u32) <= upper[j] {
                self.enumerate(j + 1, 0, tight && v as u32 == upper[j], upper, prefix, out);
            }
            prefix.pop();
            return;
        } else {
            remaining / self.micros[j]
        };
        let max = if tight { max.min(i64::from(upper[j])) } else { max };
        for v in 0..=max {
            prefix.push(v as u32);
            self.enumerate(
                j + 1,
                remaining - v * self.micros[j],
                tight && v as u32 == upper[j],
                upper,
                prefix,
                out,
            );
            prefix.pop();
        }
    }
}

/// Exact depth-first packing into fixed capacities. Slices are placed one at
/// a time, groups in decreasing order of load; within a group the chosen
/// types are non-decreasing, which skips permuted duplicates.
struct Packer<'a> {
    model: &'a Model,
    order: Vec<usize>,
    /// `(min_type, residual)` states proven unpackable, per position.
    failed: HashMap<usize, Vec<(usize, Vec<i128>)>>,
    x: GroupCounts,
    remaining: Vec<i64>,
    min_type: Vec<usize>,
    residual: Vec<i128>,
    nodes: u64,
}

impl<'a> Packer<'a> {
    fn new(model: &'a Model, caps: &[i64]) -> Self {
        let mut order: Vec<usize> = (0..model.groups.len()).collect();
        order.sort_by_key(|&g| {
            let biggest = model.groups[g].units.iter().flatten().max().copied().unwrap_or(0);
            (std::cmp::Reverse(biggest), g)
        });
        Self {
            model,
            order,
            failed: HashMap::new(),
            x: vec![vec![0; model.m]; model.groups.len()],
            remaining: model.groups.iter().map(Group::size).collect(),
            min_type: vec![0; model.groups.len()],
            residual: model.capacity(caps),
            nodes: 0,
        }
    }

    /// A state fails if it has less room and no more type choices than a
    /// state that already failed at the same position.
    fn known_failure(&self, position: usize, g: usize) -> bool {
        self.failed.get(&position).is_some_and(|states| {
            states
                .iter()
                .any(|(t, r)| self.min_type[g] >= *t && leq(&self.residual, r))
        })
    }

    fn record_failure(&mut self, position: usize, g: usize) {
        let state = (self.min_type[g], self.residual.clone());
        let states = self.failed.entry(position).or_default();
        states.retain(|(t, r)| !(*t >= state.0 && leq(r, &state.1)));
        states.push(state);
    }

    /// Places the remaining slices from `order[position]` onwards.
    fn search(&mut self, position: usize, deadline: &Deadline) -> Result<bool> {
        let Some(&g) = self.order.get(position) else {
            return Ok(true);
        };
        if self.remaining[g] == 0 {
            return self.search(position + 1, deadline);
        }
        deadline.check()?;
        self.nodes += 1;
        if self.known_failure(position, g) {
            return Ok(false);
        }
        let model = self.model;
        let Some(frac) = model.packing_lp(&self.remaining, &self.min_type, &self.residual) else {
            self.record_failure(position, g);
            return Ok(false);
        };
        let mut types: Vec<usize> = (self.min_type[g]..model.m)
            .filter(|&j| {
                model.groups[g].units[j].is_some_and(|u| i128::from(u) <= self.residual[j])
            })
            .collect();
        types.sort_by(|&a, &b| frac[g][b].total_cmp(&frac[g][a]).then(a.cmp(&b)));
        let saved_min = self.min_type[g];
        for j in types {
            let u = i128::from(model.groups[g].units[j].expect("feasible"));
            self.x[g][j] += 1;
            self.remaining[g] -= 1;
            self.residual[j] -= u;
            self.min_type[g] = j;
            if self.search(position, deadline)? {
                return Ok(true);
            }
            self.x[g][j] -= 1;
            self.remaining[g] += 1;
            self.residual[j] += u;
            self.min_type[g] = saved_min;
        }
        self.record_failure(position, g);
        Ok(false)
    }
}

#[derive(Clone)]
struct Node {
    lo: Vec<i64>,
    hi: Vec<i64>,
    parent_bound: f64,
}

struct Search<'a> {
    model: &'a Model,
    incumbent: Option<(i64, Vec<u32>, GroupCounts)>,
    nodes: u64,
    root_bound: f64,
    fitted: HashMap<Vec<i64>, Option<GroupCounts>>,
    packable: Vec<(Vec<i64>, GroupCounts)>,
    unpackable: Vec<Vec<i64>>,
}

impl<'a> Search<'a> {
    fn new(model: &'a Model) -> Self {
        Self {
            model,
            incumbent: None,
            nodes: 0,
            root_bound: 0.0,
            fitted: HashMap::new(),
            packable: Vec::new(),
            unpackable: Vec::new(),
        }
    }

    fn fit(&mut self, caps: &[i64]) -> Option<GroupCounts> {
        if let Some(known) = self.fitted.get(caps) {
            return known.clone();
        }
        let found = self.model.fit(caps);
        self.fitted.insert(caps.to_vec(), found.clone());
        found
    }

    /// Exact: group counts that fit into `caps` instances, or `None`.
    fn pack(&mut self, caps: &[i64], deadline: &Deadline) -> Result<Option<GroupCounts>> {
        if let Some((_, x)) = self.packable.iter().find(|(c, _)| leq(c, caps)) {
            return Ok(Some(x.clone()));
        }
        if self.unpackable.iter().any(|c| leq(caps, c)) {
            return Ok(None);
        }
        let found = match self.fit(caps) {
            Some(x) => Some(x),
            None => {
                let mut packer = Packer::new(self.model, caps);
                let ok = packer.search(0, deadline);
                self.nodes += packer.nodes;
                ok?.then_some(packer.x)
            }
        };
        match &found {
            Some(x) => self.packable.push((caps.to_vec(), x.clone())),
            None => self.unpackable.push(caps.to_vec()),
        }
        Ok(found)
    }

    fn offer(&mut self, x: GroupCounts) {
        let counts = self.model.counts_for(&x);
        let cost = self.model.cost_of(&counts);
        let better = match &self.incumbent {
            None => true,
            Some((c, b, _)) => cost < *c || (cost == *c && counts < *b),
        };
        if better {
            self.incumbent = Some((cost, counts, x));
        }
    }

    /// True if an allocation using exactly `caps` would beat the incumbent.
    fn improves(&self, caps: &[i64]) -> bool {
        let counts: Vec<u32> = caps.iter().map(|&c| c as u32).collect();
        let cost = self.model.cost_of(&counts);
        match &self.incumbent {
            None => true,
            Some((c, b, _)) => cost < *c || (cost == *c && counts < *b),
        }
    }

    fn pruned(&self, bound: f64) -> bool {
        match &self.incumbent {
            None => false,
            Some((cost, _, _)) => {
                bound * 1e6 > (*cost as f64) - self.model.granularity as f64 / 2.0
            }
        }
    }

    fn optimize(&mut self, deadline: &Deadline) -> Result<()> {
        self.offer(self.model.baseline());
        let model = self.model;
        let mut stack = vec![model.root()];
        while let Some(node) = stack.pop() {
            deadline.check()?;
            if self.pruned(node.parent_bound) {
                continue;
            }
            self.nodes += 1;
            let Some((b, bound)) = model.relax(&node) else {
                continue;
            };
            if self.nodes == 1 {
                self.root_bound = bound;
            }
            if self.pruned(bound) {
                continue;
            }
            let caps: Vec<i64> = b
                .iter()
                .map(|v| (v - INT_TOL).ceil().max(0.0) as i64)
                .collect();
            if self.improves(&caps) {
                if let Some(x) = self.fit(&caps) {
                    self.offer(x);
                    if self.pruned(bound) {
                        continue;
                    }
                }
            }

            let fractional = (0..model.m)
                .filter(|&j| node.lo[j] < node.hi[j])
                .map(|j| (j, b[j] - b[j].floor()))
                .filter(|&(_, f)| f > INT_TOL && f < 1.0 - INT_TOL)
                .max_by(|x, y| {
                    let dist = |f: f64| f.min(1.0 - f);
                    dist(x.1).total_cmp(&dist(y.1)).then(y.0.cmp(&x.0))
                });
            if let Some((j, f)) = fractional {
                let mut down = node.clone();
                down.hi[j] = b[j].floor() as i64;
                down.parent_bound = bound;
                let mut up = node.clone();
                up.lo[j] = b[j].ceil() as i64;
                up.parent_bound = bound;
                // The child nearer the LP value is explored first.
                if f < 0.5 {
                    stack.extend([up, down]);
                } else {
                    stack.extend([down, up]);
                }
                continue;
            }

            // Integral counts: the exact packing check settles them.
            let point: Vec<i64> = b.iter().map(|v| v.round().max(0.0) as i64).collect();
            if let Some(x) = self.pack(&point, deadline)? {
                self.offer(x);
                continue;
            }
            // Exclude every count vector <= `point`: child k raises B[k]
            // and caps the types before it.
            let mut children = Vec::new();
            for k in 0..model.m {
                if point[k] >= node.hi[k] {
                    continue;
                }
                let mut child = node.clone();
                for j in 0..k {
                    child.hi[j] = child.hi[j].min(point[j]);
                }
                child.lo[k] = point[k] + 1;
                child.parent_bound = bound;
                children.push((model.micros[k], k, child));
            }
            children.sort_by_key(|&(c, k, _)| std::cmp::Reverse((c, k)));
            stack.extend(children.into_iter().map(|(_, _, c)| c));
        }
        Ok(())
    }
}
