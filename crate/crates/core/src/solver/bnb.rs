//! Best-first branch and bound over the dense simplex. Adequate for the
//! tiny fixture class; not a general MILP engine.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::time::Instant;

use super::simplex::{self, LpProblem, LpStatus};
use super::{relative_gap, MilpBackend, RawSolution, SolveSettings, SolveStatus, INTEGRALITY_TOLERANCE, ROW_TOLERANCE};
use crate::error::{Error, Result};
use crate::lp::LinearModel;

#[derive(Debug, Clone, Copy)]
pub struct BranchAndBound {
    pub node_limit: usize,
}

impl Default for BranchAndBound {
    fn default() -> Self {
        Self { node_limit: 1_000_000 }
    }
}

struct Node {
    bound: f64,
    depth: usize,
    lb: Vec<f64>,
    ub: Vec<f64>,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Node {}
impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Node {
    // max-heap: smaller bound first, deeper first on ties
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .bound
            .total_cmp(&self.bound)
            .then(self.depth.cmp(&other.depth))
    }
}

fn relaxation(model: &LinearModel, lb: &[f64], ub: &[f64]) -> LpProblem {
    let mut p = LpProblem::new(model.vars.len());
    p.cost = model.vars.iter().map(|v| v.cost).collect();
    p.lb = lb.to_vec();
    p.ub = ub.to_vec();
    for row in &model.rows {
        p.add_row(row.terms.iter().map(|(v, c)| (v.0, *c)).collect(), row.sense, row.rhs);
    }
    p
}

fn most_fractional(model: &LinearModel, x: &[f64]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (k, v) in model.vars.iter().enumerate() {
        if !v.kind.is_integral() {
            continue;
        }
        let f = (x[k] - x[k].floor()).min(x[k].ceil() - x[k]);
        if f > INTEGRALITY_TOLERANCE && best.map_or(true, |(_, bf)| f > bf + 1e-12) {
            best = Some((k, f));
        }
    }
    best.map(|(k, _)| k)
}

impl MilpBackend for BranchAndBound {
    fn name(&self) -> &'static str {
        "bnb"
    }

    fn solve(&self, model: &LinearModel, settings: &SolveSettings) -> Result<RawSolution> {
        let start = Instant::now();
        let mut incumbent: Option<(Vec<f64>, f64)> = None;
        if let Some(ws) = &settings.warm_start {
            let mut x = ws.clone();
            for (v, xv) in model.vars.iter().zip(x.iter_mut()) {
                if v.kind.is_integral() {
                    *xv = xv.round();
                }
            }
            if model.max_violation(&x).0 <= ROW_TOLERANCE {
                let obj = model.objective(&x);
                incumbent = Some((x, obj));
            }
        }
        let lb: Vec<f64> = model
            .vars
            .iter()
            .map(|v| if v.kind.is_integral() { v.lb.ceil() } else { v.lb })
            .collect();
        let ub: Vec<f64> = model
            .vars
            .iter()
            .map(|v| if v.kind.is_integral() { v.ub.floor() } else { v.ub })
            .collect();
        let mut heap = BinaryHeap::new();
        heap.push(Node {
            bound: f64::NEG_INFINITY,
            depth: 0,
            lb,
            ub,
        });
        let mut nodes = 0usize;
        let mut timed_out = false;
        let mut global_bound = f64::NEG_INFINITY;
        while let Some(node) = heap.pop() {
            global_bound = node.bound;
            if let Some((_, inc)) = &incumbent {
                if node.bound >= *inc - 1e-9 || relative_gap(*inc, node.bound) <= settings.rel_gap {
                    heap.push(node);
                    break;
                }
            }
            if start.elapsed().as_secs_f64() > settings.time_limit || nodes >= self.node_limit {
                timed_out = true;
                heap.push(node);
                break;
            }
            nodes += 1;
            let sol = simplex::solve(&relaxation(model, &node.lb, &node.ub));
            match sol.status {
                LpStatus::Infeasible => continue,
                LpStatus::Unbounded => {
                    if incumbent.is_none() && nodes == 1 {
                        return Ok(RawSolution {
                            status: SolveStatus::Unbounded,
                            values: Vec::new(),
                            objective: f64::NEG_INFINITY,
                            gap: f64::INFINITY,
                            infeasibility_hint: Vec::new(),
                        });
                    }
                    continue;
                }
                LpStatus::IterationLimit => return Err(Error::Solver("simplex iteration limit".into())),
                LpStatus::Optimal => {}
            }
            if let Some((_, inc)) = &incumbent {
                if sol.objective >= *inc - 1e-9 {
                    continue;
                }
            }
            match most_fractional(model, &sol.x) {
                None => {
                    let mut x = sol.x;
                    for (v, xv) in model.vars.iter().zip(x.iter_mut()) {
                        if v.kind.is_integral() {
                            *xv = xv.round();
                        }
                    }
                    let obj = model.objective(&x);
                    incumbent = Some((x, obj));
                }
                Some(k) => {
                    let xk = sol.x[k];
                    let mut down_ub = node.ub.clone();
                    down_ub[k] = xk.floor();
                    let mut up_lb = node.lb.clone();
                    up_lb[k] = xk.ceil();
                    heap.push(Node {
                        bound: sol.objective,
                        depth: node.depth + 1,
                        lb: node.lb.clone(),
                        ub: down_ub,
                    });
                    heap.push(Node {
                        bound: sol.objective,
                        depth: node.depth + 1,
                        lb: up_lb,
                        ub: node.ub,
                    });
                }
            }
        }
        if heap.is_empty() {
            global_bound = incumbent.as_ref().map_or(f64::INFINITY, |(_, o)| *o);
        }
        log::debug!("branch and bound explored {nodes} nodes");
        Ok(match incumbent {
            None if timed_out => RawSolution {
                status: SolveStatus::TimeLimitNoIncumbent,
                values: Vec::new(),
                objective: f64::NAN,
                gap: f64::INFINITY,
                infeasibility_hint: Vec::new(),
            },
            None => RawSolution {
                status: SolveStatus::Infeasible,
                values: Vec::new(),
                objective: f64::NAN,
                gap: f64::INFINITY,
                infeasibility_hint: Vec::new(),
            },
            Some((values, objective)) => {
                let gap = relative_gap(objective, global_bound.min(objective));
                let status = if timed_out {
                    SolveStatus::TimeLimitIncumbent
                } else if gap <= 1e-9 {
                    SolveStatus::Optimal
                } else {
                    SolveStatus::GapLimit
                };
                RawSolution {
                    status,
                    values,
                    objective,
                    gap,
                    infeasibility_hint: Vec::new(),
                }
            }
        })
    }
}
