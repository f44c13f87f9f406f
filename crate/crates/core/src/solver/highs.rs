//! HiGHS binding. After the MIP, integer columns are fixed at their rounded
//! values and the LP is re-solved with tight tolerances so continuous values
//! satisfy every row to well below the replay tolerance.

use highs::{HighsModelStatus, HighsSolutionStatus, RowProblem, Sense as HSense};

use super::{relative_gap, MilpBackend, RawSolution, SolveSettings, SolveStatus};
use crate::error::Result;
use crate::lp::{LinearModel, Sense};

#[derive(Debug, Clone, Copy, Default)]
pub struct HighsBackend;

fn build(model: &LinearModel, fix: Option<&[f64]>) -> RowProblem {
    let mut pb = RowProblem::default();
    let cols: Vec<_> = model
        .vars
        .iter()
        .enumerate()
        .map(|(k, v)| match fix {
            Some(vals) if v.kind.is_integral() => {
                let r = vals[k].round();
                pb.add_column(v.cost, r..=r)
            }
            _ if v.kind.is_integral() && fix.is_none() => pb.add_integer_column(v.cost, v.lb..=v.ub),
            _ => pb.add_column(v.cost, v.lb..=v.ub),
        })
        .collect();
    for row in &model.rows {
        let terms: Vec<_> = row.terms.iter().map(|(v, c)| (cols[v.0], *c)).collect();
        match row.sense {
            Sense::Le => pb.add_row(..=row.rhs, terms),
            Sense::Ge => pb.add_row(row.rhs.., terms),
            Sense::Eq => pb.add_row(row.rhs..=row.rhs, terms),
        }
    }
    pb
}

fn configure(m: &mut highs::Model, settings: &SolveSettings) {
    m.make_quiet();
    m.set_option("mip_rel_gap", settings.rel_gap);
    m.set_option("mip_feasibility_tolerance", 1e-9);
    m.set_option("primal_feasibility_tolerance", 1e-9);
    if settings.rel_gap == 0.0 {
        m.set_option("mip_abs_gap", 0.0);
    }
    m.set_option("time_limit", settings.time_limit);
    m.set_option("random_seed", (settings.seed % (i32::MAX as u64)) as i32);
    m.set_option("threads", settings.threads.max(1) as i32);
}

impl MilpBackend for HighsBackend {
    fn name(&self) -> &'static str {
        "highs"
    }

    fn solve(&self, model: &LinearModel, settings: &SolveSettings) -> Result<RawSolution> {
        let mut m = build(model, None).optimise(HSense::Minimise);
        configure(&mut m, settings);
        if let Some(ws) = &settings.warm_start {
            let rounded: Vec<f64> = model
                .vars
                .iter()
                .zip(ws)
                .map(|(v, x)| if v.kind.is_integral() { x.round() } else { *x })
                .collect();
            if m.try_set_solution(Some(&rounded), None, None, None).is_err() {
                log::warn!("HiGHS rejected the warm start");
            }
        }
        let solved = m
            .try_solve()
            .map_err(|e| crate::error::Error::Solver(format!("HiGHS run failed: {e:?}")))?;
        let model_status = solved.status();
        let has_incumbent = solved.primal_solution_status() == HighsSolutionStatus::Feasible;
        let mut gap = if model.num_integral() > 0 { solved.mip_gap() } else { 0.0 };
        let status = match model_status {
            HighsModelStatus::Optimal => {
                if gap <= 1e-9 {
                    SolveStatus::Optimal
                } else {
                    SolveStatus::GapLimit
                }
            }
            HighsModelStatus::Infeasible | HighsModelStatus::UnboundedOrInfeasible => SolveStatus::Infeasible,
            HighsModelStatus::Unbounded => SolveStatus::Unbounded,
            _ if has_incumbent => SolveStatus::TimeLimitIncumbent,
            HighsModelStatus::ReachedTimeLimit | HighsModelStatus::ReachedIterationLimit => SolveStatus::TimeLimitNoIncumbent,
            other => return Err(crate::error::Error::Solver(format!("HiGHS stopped with status {other:?}"))),
        };
        if !status.has_solution() {
            return Ok(RawSolution {
                status,
                values: Vec::new(),
                objective: f64::NAN,
                gap: f64::INFINITY,
                infeasibility_hint: Vec::new(),
            });
        }
        let mut values = solved.get_solution().columns().to_vec();
        let mut objective = solved.objective_value();
        let bound = objective - gap * objective.abs();
        if let Some((v, o)) = polish(model, &values, settings) {
            values = v;
            objective = o;
            if model.num_integral() > 0 {
                gap = relative_gap(objective, bound.min(objective));
            }
        }
        for (var, x) in model.vars.iter().zip(values.iter_mut()) {
            if var.kind.is_integral() {
                *x = x.round();
            }
        }
        Ok(RawSolution {
            status,
            values,
            objective,
            gap,
            infeasibility_hint: Vec::new(),
        })
    }
}

fn polish(model: &LinearModel, values: &[f64], settings: &SolveSettings) -> Option<(Vec<f64>, f64)> {
    if model.num_integral() == 0 {
        return None;
    }
    let mut m = build(model, Some(values)).optimise(HSense::Minimise);
    m.make_quiet();
    m.set_option("time_limit", settings.time_limit);
    m.set_option("primal_feasibility_tolerance", 1e-10);
    m.set_option("dual_feasibility_tolerance", 1e-10);
    let solved = m.try_solve().ok()?;
    if solved.status() != HighsModelStatus::Optimal {
        log::warn!("polishing LP ended with {:?}; keeping the MIP values", solved.status());
        return None;
    }
    let v = solved.get_solution().columns().to_vec();
    let obj = model.objective(&v);
    Some((v, obj))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lp::{RowTag, VarKind};

    #[test]
    fn tiny_mip() {
        // min 3x + 2y s.t. x + y >= 1.5, x,y integer in [0, 3]
        let mut lp = LinearModel::default();
        let x = lp.add_var("x".into(), VarKind::Integer, 0.0, 3.0, 3.0);
        let y = lp.add_var("y".into(), VarKind::Integer, 0.0, 3.0, 2.0);
        lp.add_row("r".into(), RowTag::Capacity, vec![(x, 1.0), (y, 1.0)], Sense::Ge, 1.5);
        let s = HighsBackend.solve(&lp, &SolveSettings::default().with_gap(0.0)).unwrap();
        assert_eq!(s.status, SolveStatus::Optimal);
        assert!((s.objective - 4.0).abs() < 1e-9);
        assert_eq!(s.values, vec![0.0, 2.0]);
    }

    #[test]
    fn infeasible_mip() {
        let mut lp = LinearModel::default();
        let x = lp.add_var("x".into(), VarKind::Binary, 0.0, 1.0, 1.0);
        lp.add_row("r".into(), RowTag::Capacity, vec![(x, 1.0)], Sense::Ge, 2.0);
        let s = HighsBackend.solve(&lp, &SolveSettings::default()).unwrap();
        assert_eq!(s.status, SolveStatus::Infeasible);
    }
}
