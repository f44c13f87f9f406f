//! Solve interface over pluggable MILP backends.
//!
//! `FLEETCHARGE_SOLVER` selects the backend (`highs` or `bnb`). The
//! branch-and-bound backend is dependency free and meant for small models.

pub mod bnb;
#[cfg(feature = "highs")]
pub mod highs;
pub mod simplex;

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::installation::Installation;
use crate::lp::LinearModel;
use crate::model::PlanningModel;

pub const ROW_TOLERANCE: f64 = 1e-6;
pub const INTEGRALITY_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Optimal,
    GapLimit,
    TimeLimitIncumbent,
    /// Time ran out before any feasible point was found.
    TimeLimitNoIncumbent,
    Infeasible,
    Unbounded,
}

impl SolveStatus {
    pub fn has_solution(self) -> bool {
        matches!(self, SolveStatus::Optimal | SolveStatus::GapLimit | SolveStatus::TimeLimitIncumbent)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::GapLimit => "gap_limit",
            SolveStatus::TimeLimitIncumbent => "time_limit_incumbent",
            SolveStatus::TimeLimitNoIncumbent => "time_limit_no_incumbent",
            SolveStatus::Infeasible => "infeasible",
            SolveStatus::Unbounded => "unbounded",
        }
    }
}

impl fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveSettings {
    pub rel_gap: f64,
    /// Seconds.
    pub time_limit: f64,
    pub threads: usize,
    pub seed: u64,
    /// Column values of a prior solution of a model with the same layout.
    pub warm_start: Option<Vec<f64>>,
}

impl Default for SolveSettings {
    fn default() -> Self {
        Self {
            rel_gap: 0.01,
            time_limit: 3600.0,
            threads: 1,
            seed: 0,
            warm_start: None,
        }
    }
}

impl SolveSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.rel_gap >= 0.0) {
            return Err(Error::invalid("rel_gap must be >= 0"));
        }
        if !(self.time_limit > 0.0) {
            return Err(Error::invalid("time_limit must be > 0"));
        }
        Ok(())
    }

    pub fn with_gap(mut self, gap: f64) -> Self {
        self.rel_gap = gap;
        self
    }

    pub fn with_time_limit(mut self, secs: f64) -> Self {
        self.time_limit = secs;
        self
    }

    pub fn with_warm_start(mut self, solution: &Solution) -> Self {
        self.warm_start = Some(solution.values.clone());
        self
    }
}

/// What a backend hands back for a [`LinearModel`].
#[derive(Debug, Clone)]
pub struct RawSolution {
    pub status: SolveStatus,
    pub values: Vec<f64>,
    pub objective: f64,
    pub gap: f64,
    /// Row names hinting at the cause of infeasibility, when known.
    pub infeasibility_hint: Vec<String>,
}

pub trait MilpBackend: Send + Sync {
    fn name(&self) -> &'static str;
    fn solve(&self, model: &LinearModel, settings: &SolveSettings) -> Result<RawSolution>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BackendKind {
    Highs,
    BranchAndBound,
}

impl FromStr for BackendKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "highs" => Ok(BackendKind::Highs),
            "bnb" | "branch-and-bound" => Ok(BackendKind::BranchAndBound),
            other => Err(Error::invalid(format!("unknown solver backend `{other}`"))),
        }
    }
}

pub fn backend(kind: BackendKind) -> Result<Box<dyn MilpBackend>> {
    match kind {
        #[cfg(feature = "highs")]
        BackendKind::Highs => Ok(Box::new(highs::HighsBackend)),
        #[cfg(not(feature = "highs"))]
        BackendKind::Highs => Err(Error::Solver("built without the highs feature".into())),
        BackendKind::BranchAndBound => Ok(Box::new(bnb::BranchAndBound::default())),
    }
}

/// Backend named by `FLEETCHARGE_SOLVER`, defaulting to HiGHS when built in.
pub fn backend_from_env() -> Result<Box<dyn MilpBackend>> {
    match std::env::var("FLEETCHARGE_SOLVER") {
        Ok(s) if !s.trim().is_empty() => backend(s.parse()?),
        _ if cfg!(feature = "highs") => backend(BackendKind::Highs),
        _ => backend(BackendKind::BranchAndBound),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ObjectiveBreakdown {
    pub installation: f64,
    pub low_soc_penalty: f64,
    pub charging_penalty: f64,
}

impl ObjectiveBreakdown {
    pub fn total(&self) -> f64 {
        self.installation + self.low_soc_penalty + self.charging_penalty
    }

    pub fn penalty(&self) -> f64 {
        self.low_soc_penalty + self.charging_penalty
    }
}

/// Decoded solve result. Per-slot tables are `[truck][flat slot]`, zero off
/// parking slots; `y` is `[truck][slot][catalog position]`.
#[derive(Debug, Clone)]
pub struct Solution {
    pub status: SolveStatus,
    pub objective: f64,
    pub gap: f64,
    pub wall_time: f64,
    pub backend: String,
    pub breakdown: ObjectiveBreakdown,
    pub values: Vec<f64>,
    /// `[zone][catalog position]`.
    pub x: Vec<Vec<f64>>,
    pub y: Vec<Vec<Vec<f64>>>,
    pub a: Vec<Vec<f64>>,
    pub w: Vec<Vec<f64>>,
    pub b: Vec<Vec<f64>>,
    pub p: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
    pub b_init: Vec<f64>,
    pub infeasibility_hint: Vec<String>,
}

impl Solution {
    /// Catalog position charged at a slot, if any.
    pub fn charger_at(&self, truck: usize, index: usize) -> Option<usize> {
        self.y[truck][index].iter().position(|&y| y > 0.5)
    }
}

/// Solves with the backend chosen by the environment.
pub fn solve(model: &PlanningModel, settings: &SolveSettings) -> Result<Solution> {
    let backend = backend_from_env()?;
    solve_with(backend.as_ref(), model, settings)
}

pub fn solve_with(backend: &dyn MilpBackend, model: &PlanningModel, settings: &SolveSettings) -> Result<Solution> {
    settings.validate()?;
    if let Some(ws) = &settings.warm_start {
        if ws.len() != model.lp.vars.len() {
            return Err(Error::invalid("warm start does not match the model layout"));
        }
    }
    let start = Instant::now();
    let raw = backend.solve(&model.lp, settings)?;
    let wall_time = start.elapsed().as_secs_f64();
    Ok(decode(model, raw, wall_time, backend.name()))
}

fn decode(model: &PlanningModel, raw: RawSolution, wall_time: f64, backend: &str) -> Solution {
    let inst = &model.instance;
    let cat = &model.catalog;
    let n = inst.num_trucks();
    let h = inst.horizon();
    let nj = inst.chargers.len();
    let has = raw.status.has_solution() && raw.values.len() == model.lp.vars.len();
    let val = |id: crate::lp::VarId| if has { raw.values[id.0] } else { 0.0 };
    let mut y = vec![vec![vec![0.0; nj]; h]; n];
    let mut a = vec![vec![0.0; h]; n];
    let mut w = vec![vec![0.0; h]; n];
    let mut p = vec![vec![0.0; h]; n];
    for i in 0..n {
        for k in 0..h {
            if let Some(sv) = &cat.slots[i][k] {
                for j in 0..nj {
                    y[i][k][j] = val(sv.y[j]);
                }
                a[i][k] = val(sv.a);
                w[i][k] = val(sv.w);
                p[i][k] = val(sv.p);
            }
        }
    }
    let breakdown = if has {
        let (installation, low_soc_penalty, charging_penalty) = model.objective_parts(&raw.values);
        ObjectiveBreakdown {
            installation,
            low_soc_penalty,
            charging_penalty,
        }
    } else {
        ObjectiveBreakdown::default()
    };
    Solution {
        status: raw.status,
        objective: if has { raw.objective } else { f64::NAN },
        gap: raw.gap,
        wall_time,
        backend: backend.to_string(),
        breakdown,
        x: cat.x.iter().map(|r| r.iter().map(|&v| val(v)).collect()).collect(),
        y,
        a,
        w,
        b: cat.b.iter().map(|r| r.iter().map(|&v| val(v)).collect()).collect(),
        p,
        v: cat.v.iter().map(|r| r.iter().map(|&v| val(v)).collect()).collect(),
        b_init: cat.b_init.iter().map(|&v| val(v)).collect(),
        values: if has { raw.values } else { Vec::new() },
        infeasibility_hint: raw.infeasibility_hint,
    }
}

/// Integral charger counts per zone, keyed by charger kind.
pub fn extract_installation(solution: &Solution, model: &PlanningModel) -> Result<Installation> {
    if !solution.status.has_solution() {
        return Err(Error::Infeasible(format!("no installation in a {} solution", solution.status)));
    }
    let inst = &model.instance;
    let mut out = Installation::zeros(inst.zones.len());
    for (z, row) in solution.x.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            let r = v.round();
            if (v - r).abs() > INTEGRALITY_TOLERANCE || r < 0.0 {
                return Err(Error::FractionalInstallation { zone: z, value: v });
            }
            out.set(z, inst.chargers[j].kind, r as u32);
        }
    }
    Ok(out)
}

/// Relative gap between an incumbent and a bound, as HiGHS reports it.
pub fn relative_gap(incumbent: f64, bound: f64) -> f64 {
    if !incumbent.is_finite() || !bound.is_finite() {
        return f64::INFINITY;
    }
    let diff = (incumbent - bound).max(0.0);
    if diff == 0.0 {
        0.0
    } else {
        diff / incumbent.abs().max(1e-9)
    }
}
