//! Exhaustive oracle for tiny instances: enumerates every charging and
//! abandonment assignment, checks the waiting rules directly and resolves the
//! continuous SoC trajectory with a small LP per truck.

#![allow(dead_code)]

use fleetcharge::lp::Sense;
use fleetcharge::solver::simplex::{self, LpProblem, LpStatus};
use fleetcharge::FleetInstance;

#[derive(Debug, Clone, Copy, PartialEq)]
enum Choice {
    Idle,
    Abandon,
    Charge(usize),
}

/// Per-truck outcome of one assignment.
#[derive(Debug, Clone)]
struct TruckPlan {
    /// (slot, charger) for every charging slot.
    charging: Vec<(usize, usize)>,
    shortfall: f64,
}

pub struct OracleSetup<'a> {
    pub inst: &'a FleetInstance,
    /// Energy deliverable by charger `j` at `(truck, slot)`.
    pub coef: &'a dyn Fn(usize, usize, usize) -> f64,
    pub anxiety: bool,
    pub p_low: f64,
    pub p_charging: f64,
}

/// Minimum objective, or `None` when no assignment is feasible.
pub fn brute_force(setup: &OracleSetup<'_>) -> Option<f64> {
    let inst = setup.inst;
    let mut per_truck: Vec<Vec<TruckPlan>> = Vec::new();
    for i in 0..inst.trucks.len() {
        let plans = truck_plans(setup, i);
        if plans.is_empty() {
            return None;
        }
        per_truck.push(plans);
    }
    let h = inst.grid.days * inst.grid.slots_per_day;
    let nz = inst.zones.len();
    let nj = inst.chargers.len();
    let mut best = f64::INFINITY;
    let mut idx = vec![0usize; per_truck.len()];
    loop {
        let mut use_count = vec![vec![vec![0u32; nj]; nz]; h];
        let mut total = 0.0;
        for (i, &c) in idx.iter().enumerate() {
            let plan = &per_truck[i][c];
            total += plan.shortfall * setup.p_low + setup.p_charging * plan.charging.len() as f64;
            for &(k, j) in &plan.charging {
                let z = inst.parking[i][k].unwrap();
                use_count[k][z][j] += 1;
            }
        }
        for z in 0..nz {
            for j in 0..nj {
                let peak = (0..h).map(|k| use_count[k][z][j]).max().unwrap_or(0);
                total += f64::from(peak) * inst.chargers[j].capital_cost;
            }
        }
        best = best.min(total);
        // odometer over trucks
        let mut t = 0;
        loop {
            if t == idx.len() {
                return Some(best);
            }
            idx[t] += 1;
            if idx[t] < per_truck[t].len() {
                break;
            }
            idx[t] = 0;
            t += 1;
        }
    }
}

fn truck_plans(setup: &OracleSetup<'_>, i: usize) -> Vec<TruckPlan> {
    let inst = setup.inst;
    let h = inst.grid.days * inst.grid.slots_per_day;
    let parked: Vec<usize> = (0..h).filter(|&k| inst.parking[i][k].is_some()).collect();
    let nj = inst.chargers.len();
    let options: Vec<Choice> = [Choice::Idle, Choice::Abandon]
        .into_iter()
        .chain((0..nj).map(Choice::Charge))
        .collect();
    let mut out = Vec::new();
    let total = options.len().pow(parked.len() as u32);
    for code in 0..total {
        let mut c = code;
        let mut choice = vec![None; h];
        for &k in &parked {
            choice[k] = Some(options[c % options.len()]);
            c /= options.len();
        }
        if let Some(plan) = evaluate(setup, i, &choice) {
            out.push(plan);
        }
    }
    out
}

/// Discrete checks then the SoC LP; `None` if infeasible.
fn evaluate(setup: &OracleSetup<'_>, i: usize, choice: &[Option<Choice>]) -> Option<TruckPlan> {
    let inst = setup.inst;
    let h = choice.len();
    let dt = f64::from(inst.grid.slot_minutes) / 60.0;
    let theta = inst.anxiety_threshold;
    let zone = |k: usize| inst.parking[i][k];
    let special = |k: usize| zone(k).is_some_and(|z| inst.zones[z].is_special);

    // b <= theta forced; b outside (theta, theta + eps) required
    let mut low_forced = vec![false; h];
    let mut gap_excluded = vec![false; h];
    let mut waited = 0.0;
    for k in 0..h {
        let Some(c) = choice[k] else {
            waited = 0.0;
            continue;
        };
        let fresh = k == 0 || zone(k - 1) != zone(k);
        if fresh {
            waited = 0.0;
        } else if choice[k - 1] == Some(Choice::Abandon) && c != Choice::Abandon {
            return None;
        }
        let abandoned = c == Choice::Abandon;
        if !special(k) {
            if setup.anxiety {
                gap_excluded[k] = true;
            }
            if !abandoned && waited > 0.0 {
                if setup.anxiety && (waited - dt).abs() < 1e-12 {
                    low_forced[k] = true;
                } else {
                    return None;
                }
            }
        }
        if !matches!(c, Choice::Charge(_)) {
            waited += dt;
        }
    }

    // continuous part: b_init, b[0..h], v[0..h], p[0..h]
    let nb = 1 + h;
    let nv = h;
    let n = nb + nv + h;
    let bi = |k: usize| 1 + k;
    let vi = |k: usize| nb + k;
    let pi = |k: usize| nb + nv + k;
    let mut lp = LpProblem::new(n);
    for c in 0..nb {
        lp.lb[c] = inst.soc_min;
        lp.ub[c] = inst.soc_max;
    }
    for k in 0..h {
        lp.cost[vi(k)] = 1.0;
        lp.ub[pi(k)] = 0.0;
        if low_forced[k] {
            lp.ub[bi(k)] = lp.ub[bi(k)].min(theta);
        }
        if let Some(Choice::Charge(j)) = choice[k] {
            lp.ub[pi(k)] = (setup.coef)(i, k, j);
            let ceiling = inst.chargers[j].soc_ceiling;
            if ceiling < inst.soc_max {
                lp.ub[bi(k)] = lp.ub[bi(k)].min(ceiling);
                if k + 1 < h {
                    lp.ub[bi(k + 1)] = lp.ub[bi(k + 1)].min(ceiling);
                }
            }
        }
    }
    let e = inst.trucks[i].battery_kwh;
    for k in 0..h {
        let prev = if k == 0 { 0 } else { bi(k - 1) };
        lp.add_row(vec![(bi(k), e), (prev, -e), (pi(k), -1.0)], Sense::Eq, -inst.rho[i][k]);
        lp.add_row(vec![(vi(k), 1.0), (bi(k), 1.0)], Sense::Ge, theta);
    }
    lp.add_row(vec![(0, 1.0), (bi(h - 1), -1.0)], Sense::Eq, 0.0);

    let shortfall = solve_disjunctive(lp, &gap_excluded, &|k| bi(k), theta, inst.epsilon)?;
    let charging = (0..h)
        .filter_map(|k| match choice[k] {
            Some(Choice::Charge(j)) => Some((k, j)),
            _ => None,
        })
        .collect();
    Some(TruckPlan { charging, shortfall })
}

/// LP with `b_k <= theta or b_k >= theta + eps` on the excluded slots,
/// resolved by branching on any slot whose value falls in the gap.
fn solve_disjunctive(lp: LpProblem, excluded: &[bool], col: &dyn Fn(usize) -> usize, theta: f64, eps: f64) -> Option<f64> {
    let sol = simplex::solve(&lp);
    match sol.status {
        LpStatus::Optimal => {}
        LpStatus::Infeasible => return None,
        s => panic!("oracle LP ended with {s:?}"),
    }
    let split = (0..excluded.len()).find(|&k| {
        let b = sol.x[col(k)];
        excluded[k] && b > theta + 1e-12 && b < theta + eps - 1e-12
    });
    let Some(k) = split else {
        return Some(sol.objective);
    };
    let c = col(k);
    let mut low = lp.clone();
    low.ub[c] = low.ub[c].min(theta);
    let mut high = lp;
    high.lb[c] = high.lb[c].max(theta + eps);
    let a = solve_disjunctive(low, excluded, col, theta, eps);
    let b = solve_disjunctive(high, excluded, col, theta, eps);
    match (a, b) {
        (Some(x), Some(y)) => Some(x.min(y)),
        (x, y) => x.or(y),
    }
}

/// Deterministic coefficient `eta * P * dt * pp`.
pub fn planning_coef(inst: &FleetInstance) -> impl Fn(usize, usize, usize) -> f64 + '_ {
    move |i, k, j| {
        let c = &inst.chargers[j];
        c.efficiency * c.rated_power_kw * f64::from(inst.grid.slot_minutes) / 60.0 * inst.pp[i][k]
    }
}
