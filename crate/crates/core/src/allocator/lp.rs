//! Dense two-phase primal simplex for the small LP relaxations solved at each
//! branch-and-bound node.
//!
//! All variables are non-negative; finite lower bounds are handled by the
//! caller through shifting and upper bounds through explicit rows.

const EPS: f64 = 1e-9;
/// Pivots after which the entering rule switches to Bland's (anti-cycling).
const DANTZIG_PIVOTS: usize = 5_000;
const MAX_PIVOTS: usize = 200_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cmp {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone)]
pub struct Row {
    pub coeffs: Vec<(usize, f64)>,
    pub cmp: Cmp,
    pub rhs: f64,
}

#[derive(Debug, Clone, Default)]
pub struct Lp {
    pub n_vars: usize,
    pub cost: Vec<f64>,
    pub rows: Vec<Row>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    Optimal { x: Vec<f64>, objective: f64 },
    Infeasible,
    Unbounded,
}

impl Lp {
    pub fn new(cost: Vec<f64>) -> Self {
        Self {
            n_vars: cost.len(),
            cost,
            rows: Vec::new(),
        }
    }

    pub fn add_row(&mut self, coeffs: Vec<(usize, f64)>, cmp: Cmp, rhs: f64) {
        debug_assert!(coeffs.iter().all(|&(v, _)| v < self.n_vars));
        self.rows.push(Row { coeffs, cmp, rhs });
    }

    /// Minimizes `cost . x` subject to the rows and `x >= 0`.
    pub fn minimize(&self) -> LpOutcome {
        Tableau::build(self).solve(&self.cost)
    }
}

struct Tableau {
    m: usize,
    n_struct: usize,
    /// Columns `[0, art_start)` are structural and slack; the rest artificial.
    art_start: usize,
    width: usize,
    /// Row-major, `m` rows of `width + 1` entries; the last entry is the rhs.
    a: Vec<f64>,
    basis: Vec<usize>,
    pivots: usize,
}

impl Tableau {
    fn build(lp: &Lp) -> Self {
        let m = lp.rows.len();
        let n = lp.n_vars;
        let n_slack = lp.rows.iter().filter(|r| r.cmp != Cmp::Eq).count();
        let n_art = lp
            .rows
            .iter()
            .filter(|r| {
                let flip = r.rhs < 0.0;
                match r.cmp {
                    Cmp::Eq => true,
                    Cmp::Le => flip,
                    Cmp::Ge => !flip,
                }
            })
            .count();
        let art_start = n + n_slack;
        let width = art_start + n_art;
        let stride = width + 1;
        let mut a = vec![0.0; m * stride];
        let mut basis = vec![0; m];
        let (mut slack, mut art) = (n, art_start);
        for (r, row) in lp.rows.iter().enumerate() {
            let sign = if row.rhs < 0.0 { -1.0 } else { 1.0 };
            let line = &mut a[r * stride..(r + 1) * stride];
            for &(v, c) in &row.coeffs {
                line[v] += sign * c;
            }
            line[width] = sign * row.rhs;
            let cmp = match (row.cmp, sign < 0.0) {
                (Cmp::Le, true) => Cmp::Ge,
                (Cmp::Ge, true) => Cmp::Le,
                (c, _) => c,
            };
            match cmp {
                Cmp::Le => {
                    line[slack] = 1.0;
                    basis[r] = slack;
                    slack += 1;
                }
                Cmp::Ge => {
                    line[slack] = -1.0;
                    slack += 1;
                    line[art] = 1.0;
                    basis[r] = art;
                    art += 1;
                }
                Cmp::Eq => {
                    line[art] = 1.0;
                    basis[r] = art;
                    art += 1;
                }
            }
        }
        Self {
            m,
            n_struct: n,
            art_start,
            width,
            a,
            basis,
            pivots: 0,
        }
    }

    fn stride(&self) -> usize {
        self.width + 1
    }

    fn rhs(&self, r: usize) -> f64 {
        self.a[r * self.stride() + self.width]
    }

    fn pivot(&mut self, pr: usize, pc: usize) {
        let stride = self.stride();
        let inv = 1.0 / self.a[pr * stride + pc];
        for v in &mut self.a[pr * stride..(pr + 1) * stride] {
            *v *= inv;
        }
        let prow: Vec<f64> = self.a[pr * stride..(pr + 1) * stride].to_vec();
        for r in 0..self.m {
            if r == pr {
                continue;
            }
            let line = &mut self.a[r * stride..(r + 1) * stride];
            let f = line[pc];
            if f.abs() > 0.0 {
                for (x, p) in line.iter_mut().zip(&prow) {
                    *x -= f * p;
                }
                line[pc] = 0.0;
            }
        }
        self.basis[pr] = pc;
        self.pivots += 1;
    }

    /// Runs simplex iterations minimizing `obj` (indexed by column) over the
    /// columns in `[0, allowed)`. Returns false if unbounded.
    fn optimize(&mut self, obj: &[f64], allowed: usize) -> Option<bool> {
        let stride = self.stride();
        loop {
            if self.pivots > MAX_PIVOTS {
                return None;
            }
            // Reduced costs d_j = c_j - c_B . column_j.
            let mut reduced: Vec<f64> = obj[..allowed].to_vec();
            for r in 0..self.m {
                let cb = obj[self.basis[r]];
                if cb != 0.0 {
                    let line = &self.a[r * stride..r * stride + allowed];
                    for (d, x) in reduced.iter_mut().zip(line) {
                        *d -= cb * x;
                    }
                }
            }
            let bland = self.pivots >= DANTZIG_PIVOTS;
            let mut enter = None;
            let mut best = -EPS;
            for (j, &d) in reduced.iter().enumerate() {
                if d < best {
                    enter = Some(j);
                    if bland {
                        break;
                    }
                    best = d;
                }
            }
            let Some(pc) = enter else {
                return Some(true);
            };
            let mut leave: Option<(usize, f64)> = None;
            for r in 0..self.m {
                let coef = self.a[r * stride + pc];
                if coef > EPS {
                    let ratio = self.rhs(r) / coef;
                    let better = match leave {
                        None => true,
                        Some((lr, lratio)) => {
                            ratio < lratio - EPS
                                || (ratio <= lratio + EPS && self.basis[r] < self.basis[lr])
                        }
                    };
                    if better {
                        leave = Some((r, ratio));
                    }
                }
            }
            let Some((pr, _)) = leave else {
                return Some(false);
            };
            self.pivot(pr, pc);
        }
    }

    fn solve(mut self, cost: &[f64]) -> LpOutcome {
        let stride = self.stride();
        if self.width > self.art_start {
            let mut phase1 = vec![0.0; self.width];
            for c in &mut phase1[self.art_start..] {
                *c = 1.0;
            }
            if self.optimize(&phase1, self.width).is_none() {
                return LpOutcome::Infeasible;
            }
            let infeasibility: f64 = (0..self.m)
                .filter(|&r| self.basis[r] >= self.art_start)
                .map(|r| self.rhs(r))
                .sum();
            let scale = 1.0 + (0..self.m).map(|r| self.rhs(r).abs()).fold(0.0, f64::max);
            if infeasibility > 1e-7 * scale {
                return LpOutcome::Infeasible;
            }
            // Drive zero-valued artificials out of the basis where possible.
            for r in 0..self.m {
                if self.basis[r] >= self.art_start {
                    let col = (0..self.art_start)
                        .find(|&c| self.a[r * stride + c].abs() > 1e-7);
                    if let Some(c) = col {
                        self.pivot(r, c);
                    }
                }
            }
        }
        let mut obj = vec![0.0; self.width];
        obj[..self.n_struct].copy_from_slice(cost);
        match self.optimize(&obj, self.art_start) {
            None => LpOutcome::Infeasible,
            Some(false) => LpOutcome::Unbounded,
            Some(true) => {
                let mut x = vec![0.0; self.n_struct];
                for r in 0..self.m {
                    if self.basis[r] < self.n_struct {
                        x[self.basis[r]] = self.rhs(r).max(0.0);
                    }
                }
                let objective = x.iter().zip(cost).map(|(a, b)| a * b).sum();
                LpOutcome::Optimal { x, objective }
            }
        }
    }
}
