//! Multi-day planning: high-consumption vehicle filtering, representative
//! day selection (DS) and month-by-month iterative planning and scheduling
//! (IPS).

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::heuristic::{run_fix_and_optimize, HeuristicConfig, IterationLog};
use crate::installation::Installation;
use crate::model::{build_model, CaseProfile, ModelConfig, Penalties, PlanningModel, PowerSource};
use crate::replay::{replay_solution, ReplayResult};
use crate::solver::{extract_installation, solve, Solution, SolveSettings};
use crate::types::{ChargerKind, FleetInstance, PP_MAX, PP_MIN};
use crate::uncertainty::{compute_moments, observations_from_instance, UncertaintyMoments};

pub const KM_PER_MILE: f64 = 1.609_344;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HcvEntry {
    pub truck: usize,
    pub name: String,
    pub reason: String,
    /// Largest end-of-horizon SoC shortfall over the trials, kWh.
    pub deficit_kwh: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HcvReport {
    pub kept: Vec<usize>,
    pub hcv: Vec<HcvEntry>,
}

impl HcvReport {
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["truck", "name", "reason", "deficit_kwh"])?;
        for e in &self.hcv {
            w.write_record([
                e.truck.to_string(),
                e.name.clone(),
                e.reason.clone(),
                crate::bundle::fmt_decimal(e.deficit_kwh),
            ])?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// Worst-case effective duration used by the robust HCV simulation.
fn hcv_duration(inst: &FleetInstance, moments: Option<&UncertaintyMoments>, i: usize, k: usize) -> f64 {
    match moments.and_then(|m| m.moment_at(inst, i, k).map(|mo| (m, mo))) {
        Some((m, mo)) => (mo.mu - m.sigma_multiplier * mo.sigma).clamp(PP_MIN, PP_MAX),
        None => inst.pp[i][k],
    }
}

/// Greedy pre-simulation: each truck charges as much as any charger allows
/// at every parking slot, starting from a random SoC. Trucks that never park,
/// or that end a trial below their starting SoC, are high-consumption
/// vehicles.
pub fn filter_hcv(inst: &FleetInstance, moments: Option<&UncertaintyMoments>, seed: u64, trials: usize) -> HcvReport {
    let dt = inst.grid.slot_hours();
    let results: Vec<Option<HcvEntry>> = (0..inst.num_trucks())
        .into_par_iter()
        .map(|i| {
            let truck = &inst.trucks[i];
            if inst.parking_slot_count(i) == 0 {
                return Some(HcvEntry {
                    truck: i,
                    name: truck.name.clone(),
                    reason: "never parks in a charging zone".into(),
                    deficit_kwh: inst.total_rho(i),
                });
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let e = truck.battery_kwh;
            let mut worst = 0.0f64;
            for _ in 0..trials.max(1) {
                let start: f64 = rng.gen_range(inst.soc_min..=inst.soc_max);
                let mut soc = start;
                for k in 0..inst.horizon() {
                    if inst.is_parked(i, k) {
                        let pp = hcv_duration(inst, moments, i, k);
                        let gain = inst
                            .chargers
                            .iter()
                            .map(|c| (c.slot_energy(dt) * pp).min(((c.soc_ceiling - soc) * e).max(0.0)))
                            .fold(0.0, f64::max);
                        soc += gain / e;
                    }
                    soc -= inst.rho[i][k] / e;
                }
                worst = worst.max((start - soc) * e);
            }
            (worst > 1e-9).then(|| HcvEntry {
                truck: i,
                name: truck.name.clone(),
                reason: "cannot restore its starting SoC".into(),
                deficit_kwh: worst,
            })
        })
        .collect();
    let mut kept = Vec::new();
    let mut hcv = Vec::new();
    for (i, r) in results.into_iter().enumerate() {
        match r {
            Some(e) => hcv.push(e),
            None => kept.push(i),
        }
    }
    HcvReport { kept, hcv }
}

/// Ten per-day statistics used to rank days.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DayScore {
    pub day: usize,
    /// Total fleet distance, moving trucks, distance per moving truck, trucks
    /// over the distance threshold, total energy, consuming trucks, energy per
    /// consuming truck, trucks over the energy threshold, total stopped
    /// hours, stopped trucks.
    pub metrics: [f64; 10],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DistanceUnit {
    Km,
    Miles,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DaySelectionConfig {
    pub per_criterion_top: usize,
    pub padding: usize,
    /// Threshold for criterion 4, in `distance_unit`.
    pub distance_threshold: f64,
    pub distance_unit: DistanceUnit,
    /// Threshold for criterion 8, kWh.
    pub energy_threshold: f64,
}

impl Default for DaySelectionConfig {
    fn default() -> Self {
        Self {
            per_criterion_top: 1,
            padding: 2,
            distance_threshold: 296.0,
            distance_unit: DistanceUnit::Km,
            energy_threshold: 75.0,
        }
    }
}

/// Scores every day. Instance distances are kilometres; when absent the
/// distance criteria are zero and moving trucks are those that consume energy.
pub fn score_days(inst: &FleetInstance, config: &DaySelectionConfig) -> Vec<DayScore> {
    let t = inst.grid.slots_per_day;
    let dt = inst.grid.slot_hours();
    let threshold_km = match config.distance_unit {
        DistanceUnit::Km => config.distance_threshold,
        DistanceUnit::Miles => config.distance_threshold * KM_PER_MILE,
    };
    (0..inst.grid.days)
        .into_par_iter()
        .map(|d| {
            let mut m = [0.0; 10];
            for i in 0..inst.num_trucks() {
                let slots = d * t..(d + 1) * t;
                let dist: f64 = inst.distance.as_ref().map_or(0.0, |dd| dd[i][slots.clone()].iter().sum());
                let energy: f64 = inst.rho[i][slots.clone()].iter().sum();
                let stopped: f64 = slots.clone().map(|k| inst.pp[i][k] * dt).sum();
                let moving = if inst.distance.is_some() { dist > 0.0 } else { energy > 0.0 };
                m[0] += dist;
                if moving {
                    m[1] += 1.0;
                }
                if dist > threshold_km {
                    m[3] += 1.0;
                }
                m[4] += energy;
                if energy > 0.0 {
                    m[5] += 1.0;
                }
                if energy > config.energy_threshold {
                    m[7] += 1.0;
                }
                m[8] += stopped;
                if slots.clone().any(|k| inst.is_parked(i, k)) {
                    m[9] += 1.0;
                }
            }
            m[2] = if m[1] > 0.0 { m[0] / m[1] } else { 0.0 };
            m[6] = if m[5] > 0.0 { m[4] / m[5] } else { 0.0 };
            DayScore { day: d, metrics: m }
        })
        .collect()
}

/// Top days per criterion (1–8 highest first, 9–10 lowest first), padded on
/// both sides, plus the first and last two days, sorted and deduplicated.
pub fn select_days(scores: &[DayScore], per_criterion_top: usize, padding: usize) -> Vec<usize> {
    let days = scores.len();
    if days == 0 {
        return Vec::new();
    }
    let mut picked = std::collections::BTreeSet::new();
    for c in 0..10 {
        let mut order: Vec<&DayScore> = scores.iter().collect();
        order.sort_by(|a, b| {
            let (x, y) = (a.metrics[c], b.metrics[c]);
            let o = if c < 8 { y.total_cmp(&x) } else { x.total_cmp(&y) };
            o.then(a.day.cmp(&b.day))
        });
        for s in order.into_iter().take(per_criterion_top) {
            let lo = s.day.saturating_sub(padding);
            let hi = (s.day + padding).min(days - 1);
            picked.extend(lo..=hi);
        }
    }
    picked.extend(0..days.min(2));
    picked.extend(days.saturating_sub(2)..days);
    picked.into_iter().collect()
}

/// Planning options shared by DS and IPS.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanConfig {
    pub case: CaseProfile,
    pub penalties: Penalties,
    /// Zero plans with the instance durations.
    pub sigma_multiplier: f64,
    /// Sigma reduction per charger kind (slow, fast).
    pub gamma: [f64; 2],
    /// Fix-and-optimize instead of a direct robust solve.
    pub heuristic: Option<HeuristicConfig>,
    pub settings: SolveSettings,
    pub hcv_seed: u64,
    pub hcv_trials: usize,
    pub day_selection: DaySelectionConfig,
    /// Extra penalty tolerated by a scheduling-only month before the
    /// installation is re-optimised; `None` accepts any feasible month.
    pub penalty_slack: Option<f64>,
}

impl Default for PlanConfig {
    fn default() -> Self {
        Self {
            case: CaseProfile::Benchmark,
            penalties: Penalties::default(),
            sigma_multiplier: 0.0,
            gamma: [1.0, 1.0],
            heuristic: None,
            settings: SolveSettings::default(),
            hcv_seed: 0,
            hcv_trials: 3,
            day_selection: DaySelectionConfig::default(),
            penalty_slack: Some(0.05),
        }
    }
}

impl PlanConfig {
    fn model_config(&self) -> ModelConfig {
        ModelConfig {
            penalties: self.penalties,
            ..ModelConfig::default().with_case(self.case)
        }
    }

    fn robust(&self) -> bool {
        self.sigma_multiplier > 0.0
    }
}

/// Moments of an instance's own durations with the configured spread.
pub fn instance_moments(inst: &FleetInstance, config: &PlanConfig) -> Result<UncertaintyMoments> {
    Ok(compute_moments(observations_from_instance(inst))?
        .with_gamma(config.gamma[0], config.gamma[1])
        .with_multiplier(config.sigma_multiplier))
}

/// One solved window.
#[derive(Debug, Clone)]
pub struct WindowSolve {
    pub model: PlanningModel,
    pub solution: Solution,
    pub installation: Installation,
    pub logs: Vec<IterationLog>,
    pub degraded: bool,
}

/// Solves an instance under a plan config and installation bounds. Returns
/// `Ok(None)` when the model has no feasible solution.
pub fn solve_window(
    inst: &FleetInstance,
    moments: Option<&UncertaintyMoments>,
    config: &PlanConfig,
    model_config: &ModelConfig,
) -> Result<Option<WindowSolve>> {
    let robust = config.robust() && moments.is_some();
    if robust {
        if let Some(h) = &config.heuristic {
            return match run_fix_and_optimize(inst, moments.expect("robust"), model_config, h, &config.settings) {
                Ok(o) => Ok(Some(WindowSolve {
                    installation: o.installation,
                    model: o.model,
                    solution: o.solution,
                    logs: o.logs,
                    degraded: o.degraded,
                })),
                Err(Error::Infeasible(msg)) => {
                    log::warn!("{msg}");
                    Ok(None)
                }
                Err(e) => Err(e),
            };
        }
    }
    let source = if robust {
        PowerSource::Robust(moments.expect("robust"))
    } else {
        PowerSource::Deterministic
    };
    let model = build_model(inst, source, model_config)?;
    let solution = solve(&model, &config.settings)?;
    if !solution.status.has_solution() {
        return Ok(None);
    }
    let installation = extract_installation(&solution, &model)?;
    Ok(Some(WindowSolve {
        model,
        solution,
        installation,
        logs: Vec::new(),
        degraded: false,
    }))
}

fn infeasible_with_suggestions(inst: &FleetInstance, what: &str) -> Error {
    let mut need: Vec<(f64, &str)> = (0..inst.num_trucks())
        .map(|i| (inst.total_rho(i), inst.trucks[i].name.as_str()))
        .collect();
    need.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(b.1)));
    let names: Vec<String> = need.iter().take(3).map(|(e, n)| format!("{n} ({e:.1} kWh)")).collect();
    Error::Infeasible(format!(
        "{what} is infeasible; heaviest consumers, candidates for HCV exclusion: {}",
        names.join(", ")
    ))
}

#[derive(Debug, Clone)]
pub struct DsOutcome {
    pub hcv: HcvReport,
    pub days: Vec<usize>,
    /// Kept trucks over the selected days.
    pub instance: FleetInstance,
    pub moments: Option<UncertaintyMoments>,
    pub result: WindowSolve,
}

/// Day-selection planning.
pub fn plan_ds(year: &FleetInstance, config: &PlanConfig) -> Result<DsOutcome> {
    year.validate()?;
    let hcv_moments = if config.robust() { Some(instance_moments(year, config)?) } else { None };
    let hcv = filter_hcv(year, hcv_moments.as_ref(), config.hcv_seed, config.hcv_trials);
    if hcv.kept.is_empty() {
        return Err(Error::Infeasible("every truck is a high-consumption vehicle".into()));
    }
    let kept = year.select_trucks(&hcv.kept);
    let scores = score_days(&kept, &config.day_selection);
    let days = select_days(&scores, config.day_selection.per_criterion_top, config.day_selection.padding);
    let moments = if config.robust() { Some(instance_moments(&kept, config)?) } else { None };
    let sub = kept.select_days(&days);
    let result = solve_window(&sub, moments.as_ref(), config, &config.model_config())?
        .ok_or_else(|| infeasible_with_suggestions(&sub, "the selected-day instance"))?;
    Ok(DsOutcome {
        hcv,
        days,
        instance: sub,
        moments,
        result,
    })
}

/// A planning month: its own days plus the overlap days before it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonthlyWindow {
    /// 1-based.
    pub month: usize,
    pub first_day: usize,
    pub end_day: usize,
    pub overlap: usize,
}

impl MonthlyWindow {
    pub fn window_start(&self) -> usize {
        self.first_day - self.overlap
    }

    pub fn len(&self) -> usize {
        self.end_day - self.window_start()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

const CALENDAR: [usize; 12] = [31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31];

/// Month lengths: calendar months for a 365-day horizon, otherwise blocks of
/// `month_days` with a shorter last block.
pub fn month_lengths(days: usize, month_days: Option<usize>) -> Vec<usize> {
    match month_days {
        None if days == 365 => CALENDAR.to_vec(),
        None => vec![days],
        Some(m) => {
            let m = m.max(1);
            let mut out = vec![m; days / m];
            if days % m > 0 {
                out.push(days % m);
            }
            out
        }
    }
}

/// Windows with `overlap` days prepended (clipped at the horizon start).
pub fn month_windows(lengths: &[usize], overlap: usize) -> Vec<MonthlyWindow> {
    let mut start = 0;
    lengths
        .iter()
        .enumerate()
        .map(|(m, &len)| {
            let w = MonthlyWindow {
                month: m + 1,
                first_day: start,
                end_day: start + len,
                overlap: overlap.min(start),
            };
            start += len;
            w
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MonthMode {
    ScheduleOnly,
    Joint,
}

impl MonthMode {
    pub fn as_str(self) -> &'static str {
        match self {
            MonthMode::ScheduleOnly => "schedule_only",
            MonthMode::Joint => "joint",
        }
    }
}

#[derive(Debug, Clone)]
pub struct MonthRecord {
    pub window: MonthlyWindow,
    pub mode: MonthMode,
    /// Installation carried out of this month.
    pub installation: Installation,
    pub objective: f64,
    pub penalty: f64,
    pub wall_time: f64,
}

#[derive(Debug, Clone)]
pub struct IpsOutcome {
    pub hcv: HcvReport,
    pub months: Vec<MonthRecord>,
    pub final_installation: Installation,
    /// Kept trucks over the whole horizon.
    pub instance: FleetInstance,
    pub moments: Option<UncertaintyMoments>,
}

impl IpsOutcome {
    /// Long-format trajectory: month, mode, zone, slow, fast.
    pub fn write_trajectory(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["month", "first_day", "end_day", "mode", "zone", "slow", "fast"])?;
        for m in &self.months {
            for z in 0..m.installation.counts.len() {
                w.write_record([
                    m.window.month.to_string(),
                    m.window.first_day.to_string(),
                    m.window.end_day.to_string(),
                    m.mode.as_str().to_string(),
                    self.instance.zones[z].name.clone(),
                    m.installation.get(z, ChargerKind::Slow).to_string(),
                    m.installation.get(z, ChargerKind::Fast).to_string(),
                ])?;
            }
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// Month-by-month planning that carries the installation forward.
pub fn plan_ips(year: &FleetInstance, windows: &[MonthlyWindow], config: &PlanConfig) -> Result<IpsOutcome> {
    year.validate()?;
    let mut expected = 0;
    for w in windows {
        if w.first_day != expected || w.end_day <= w.first_day || w.overlap > w.first_day {
            return Err(Error::invalid("months must partition the horizon in order"));
        }
        expected = w.end_day;
    }
    if expected != year.grid.days {
        return Err(Error::invalid(format!(
            "months cover {expected} days but the horizon has {}",
            year.grid.days
        )));
    }
    let hcv_moments = if config.robust() { Some(instance_moments(year, config)?) } else { None };
    let hcv = filter_hcv(year, hcv_moments.as_ref(), config.hcv_seed, config.hcv_trials);
    if hcv.kept.is_empty() {
        return Err(Error::Infeasible("every truck is a high-consumption vehicle".into()));
    }
    let kept = year.select_trucks(&hcv.kept);
    let moments = if config.robust() { Some(instance_moments(&kept, config)?) } else { None };
    let mut carried = Installation::zeros(kept.zones.len());
    let mut months = Vec::with_capacity(windows.len());
    for w in windows {
        let sub = kept.day_range(w.window_start()..w.end_day);
        let fixed = config.model_config().fix_installation(&carried);
        let scheduled = solve_window(&sub, moments.as_ref(), config, &fixed)?;
        let joint_config = config.model_config().installation_at_least(&carried);
        let (mode, chosen) = match scheduled {
            Some(s) => match config.penalty_slack {
                None => (MonthMode::ScheduleOnly, s),
                Some(slack) => {
                    let joint = solve_window(&sub, moments.as_ref(), config, &joint_config)?;
                    match joint {
                        Some(j) if s.solution.breakdown.penalty() > j.solution.breakdown.penalty() * (1.0 + slack) + 1e-9 => {
                            (MonthMode::Joint, j)
                        }
                        _ => (MonthMode::ScheduleOnly, s),
                    }
                }
            },
            None => {
                let j = solve_window(&sub, moments.as_ref(), config, &joint_config)?
                    .ok_or_else(|| infeasible_with_suggestions(&sub, &format!("month {}", w.month)))?;
                (MonthMode::Joint, j)
            }
        };
        carried = carried.max_with(&chosen.installation);
        log::info!(
            "month {}: {} with {} slow / {} fast",
            w.month,
            mode.as_str(),
            carried.total(ChargerKind::Slow),
            carried.total(ChargerKind::Fast)
        );
        months.push(MonthRecord {
            window: w.clone(),
            mode,
            installation: carried.clone(),
            objective: chosen.solution.objective,
            penalty: chosen.solution.breakdown.penalty(),
            wall_time: chosen.solution.wall_time,
        });
    }
    Ok(IpsOutcome {
        hcv,
        months,
        final_installation: carried,
        instance: kept,
        moments,
    })
}

/// Scheduling-only re-solve and replay of every month with the final
/// installation under the planning durations.
pub fn verify_ips(outcome: &IpsOutcome, config: &PlanConfig) -> Result<Vec<(usize, Option<ReplayResult>)>> {
    let mut out = Vec::with_capacity(outcome.months.len());
    for m in &outcome.months {
        let sub = outcome.instance.day_range(m.window.window_start()..m.window.end_day);
        let mc = config.model_config().fix_installation(&outcome.final_installation);
        let model = build_model(&sub, PowerSource::Deterministic, &mc)?;
        let sol = solve(&model, &config.settings)?;
        let replayed = if sol.status.has_solution() {
            Some(replay_solution(&model, &sol, None, None)?)
        } else {
            None
        };
        out.push((m.window.month, replayed));
    }
    Ok(out)
}
