//! Dense two-phase primal simplex. Meant for the small models the
//! branch-and-bound fallback and test oracles handle; it makes no attempt at
//! sparsity or factorisation.

use crate::lp::Sense;

const TOL: f64 = 1e-9;
const MAX_PIVOTS: usize = 200_000;

#[derive(Debug, Clone, Default)]
pub struct LpProblem {
    pub cost: Vec<f64>,
    /// Finite lower bounds are required.
    pub lb: Vec<f64>,
    pub ub: Vec<f64>,
    pub rows: Vec<(Vec<(usize, f64)>, Sense, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub status: LpStatus,
    pub x: Vec<f64>,
    pub objective: f64,
}

impl LpProblem {
    pub fn new(n: usize) -> Self {
        Self {
            cost: vec![0.0; n],
            lb: vec![0.0; n],
            ub: vec![f64::INFINITY; n],
            rows: Vec::new(),
        }
    }

    pub fn num_vars(&self) -> usize {
        self.cost.len()
    }

    pub fn add_row(&mut self, terms: Vec<(usize, f64)>, sense: Sense, rhs: f64) {
        self.rows.push((terms, sense, rhs));
    }
}

struct Tableau {
    /// `m` constraint rows of width `cols + 1` (last entry is the rhs).
    a: Vec<Vec<f64>>,
    basis: Vec<usize>,
    cols: usize,
}

impl Tableau {
    fn pivot(&mut self, r: usize, c: usize, d: &mut [f64], obj: &mut f64) {
        let p = self.a[r][c];
        let width = self.cols + 1;
        for v in self.a[r].iter_mut() {
            *v /= p;
        }
        let pivot_row = self.a[r].clone();
        for (i, row) in self.a.iter_mut().enumerate() {
            if i == r {
                continue;
            }
            let f = row[c];
            if f.abs() > 0.0 {
                for k in 0..width {
                    row[k] -= f * pivot_row[k];
                }
                row[c] = 0.0;
            }
        }
        let f = d[c];
        if f != 0.0 {
            for k in 0..self.cols {
                d[k] -= f * pivot_row[k];
            }
            *obj -= f * pivot_row[self.cols];
            d[c] = 0.0;
        }
        self.basis[r] = c;
    }

    /// Minimises with reduced costs `d`; `allowed` masks entering columns.
    fn optimise(&mut self, d: &mut [f64], obj: &mut f64, allowed: &[bool]) -> LpStatus {
        let mut degenerate_run = 0usize;
        for _ in 0..MAX_PIVOTS {
            let bland = degenerate_run > 50;
            let mut enter = None;
            let mut best = -TOL;
            for (j, &dj) in d.iter().enumerate().take(self.cols) {
                if !allowed[j] || dj >= -TOL {
                    continue;
                }
                if bland {
                    enter = Some(j);
                    break;
                }
                if dj < best {
                    best = dj;
                    enter = Some(j);
                }
            }
            let Some(c) = enter else {
                return LpStatus::Optimal;
            };
            let mut leave: Option<(usize, f64)> = None;
            for (i, row) in self.a.iter().enumerate() {
                let aic = row[c];
                if aic > TOL {
                    let ratio = row[self.cols] / aic;
                    let better = match leave {
                        None => true,
                        Some((li, lr)) => ratio < lr - TOL || (ratio <= lr + TOL && self.basis[i] < self.basis[li]),
                    };
                    if better {
                        leave = Some((i, ratio));
                    }
                }
            }
            let Some((r, ratio)) = leave else {
                return LpStatus::Unbounded;
            };
            if ratio.abs() <= TOL {
                degenerate_run += 1;
            } else {
                degenerate_run = 0;
            }
            self.pivot(r, c, d, obj);
        }
        LpStatus::IterationLimit
    }
}

pub fn solve(problem: &LpProblem) -> LpSolution {
    let n = problem.num_vars();
    assert!(problem.lb.iter().all(|l| l.is_finite()), "simplex needs finite lower bounds");
    let infeasible = || LpSolution {
        status: LpStatus::Infeasible,
        x: vec![0.0; n],
        objective: f64::INFINITY,
    };
    if problem.lb.iter().zip(&problem.ub).any(|(l, u)| l > &(u + TOL)) {
        return infeasible();
    }

    // shifted rows x = lb + x', plus explicit upper-bound rows
    let mut rows: Vec<(Vec<(usize, f64)>, Sense, f64)> = Vec::with_capacity(problem.rows.len() + n);
    for (terms, sense, rhs) in &problem.rows {
        let shift: f64 = terms.iter().map(|(j, c)| c * problem.lb[*j]).sum();
        rows.push((terms.clone(), *sense, rhs - shift));
    }
    for j in 0..n {
        if problem.ub[j].is_finite() {
            rows.push((vec![(j, 1.0)], Sense::Le, problem.ub[j] - problem.lb[j]));
        }
    }
    let m = rows.len();
    let n_slack = rows.iter().filter(|r| r.1 != Sense::Eq).count();
    let mut flipped = Vec::with_capacity(m);
    for (_, sense, rhs) in rows.iter_mut() {
        if *rhs < 0.0 {
            *rhs = -*rhs;
            *sense = match *sense {
                Sense::Le => Sense::Ge,
                Sense::Ge => Sense::Le,
                Sense::Eq => Sense::Eq,
            };
            flipped.push(true);
        } else {
            flipped.push(false);
        }
    }
    let n_art = rows.iter().filter(|r| r.1 != Sense::Le).count();
    let cols = n + n_slack + n_art;
    let mut a = vec![vec![0.0; cols + 1]; m];
    let mut basis = vec![0usize; m];
    let mut slack = n;
    let mut art = n + n_slack;
    for (i, (terms, sense, rhs)) in rows.iter().enumerate() {
        let sign = if flipped[i] { -1.0 } else { 1.0 };
        for &(j, c) in terms {
            a[i][j] += sign * c;
        }
        a[i][cols] = *rhs;
        match sense {
            Sense::Le => {
                a[i][slack] = 1.0;
                basis[i] = slack;
                slack += 1;
            }
            Sense::Ge => {
                a[i][slack] = -1.0;
                slack += 1;
                a[i][art] = 1.0;
                basis[i] = art;
                art += 1;
            }
            Sense::Eq => {
                a[i][art] = 1.0;
                basis[i] = art;
                art += 1;
            }
        }
    }
    let art_start = n + n_slack;
    let mut tab = Tableau { a, basis, cols };

    // phase 1
    let mut d = vec![0.0; cols];
    let mut obj = 0.0;
    for j in art_start..cols {
        d[j] = 1.0;
    }
    for i in 0..m {
        if tab.basis[i] >= art_start {
            for k in 0..cols {
                d[k] -= tab.a[i][k];
            }
            obj -= tab.a[i][cols];
        }
    }
    let allowed_all = vec![true; cols];
    let status = tab.optimise(&mut d, &mut obj, &allowed_all);
    if status == LpStatus::IterationLimit {
        return LpSolution {
            status,
            x: vec![0.0; n],
            objective: f64::NAN,
        };
    }
    let infeas: f64 = (0..m).filter(|&i| tab.basis[i] >= art_start).map(|i| tab.a[i][cols]).sum();
    if infeas > 1e-7 {
        return infeasible();
    }
    // drive remaining artificials out of the basis
    for i in 0..m {
        if tab.basis[i] >= art_start {
            if let Some(c) = (0..art_start).find(|&k| tab.a[i][k].abs() > 1e-7) {
                let mut dummy = vec![0.0; cols];
                let mut o = 0.0;
                tab.pivot(i, c, &mut dummy, &mut o);
            }
        }
    }

    // phase 2
    let mut d = vec![0.0; cols];
    d[..n].copy_from_slice(&problem.cost);
    let mut obj = 0.0;
    for i in 0..m {
        let b = tab.basis[i];
        let cb = if b < n { problem.cost[b] } else { 0.0 };
        if cb != 0.0 {
            for k in 0..cols {
                d[k] -= cb * tab.a[i][k];
            }
            obj -= cb * tab.a[i][cols];
        }
    }
    let allowed: Vec<bool> = (0..cols).map(|k| k < art_start).collect();
    let status = tab.optimise(&mut d, &mut obj, &allowed);
    let mut x = problem.lb.clone();
    for i in 0..m {
        let b = tab.basis[i];
        if b < n {
            x[b] += tab.a[i][cols];
        }
    }
    let objective = problem.cost.iter().zip(&x).map(|(c, x)| c * x).sum();
    LpSolution { status, x, objective }
}
