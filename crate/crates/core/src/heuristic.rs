//! Fix-and-optimize under effective-duration uncertainty.
//!
//! The master problem is solved with the planning durations. Each outer
//! iteration draws a sample from the box, flags slots whose scheduled energy
//! exceeds what the sample can deliver, forces fast charging there and
//! re-solves from the previous incumbent. The installation is then
//! post-processed and a final model is solved under the last sample.

use std::collections::BTreeSet;
use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::installation::Installation;
use crate::model::{build_model, max_occupancy, ModelConfig, PlanningModel, PowerSource};
use crate::solver::{extract_installation, solve, Solution, SolveSettings};
use crate::types::ChargerKind;
use crate::uncertainty::{sample_pp, PpSample, UncertaintyMoments};

/// Slack on the fast-charging violation test, kWh.
pub const FAST_VIOLATION_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeuristicConfig {
    pub max_iterations: usize,
    /// Initial slow-charging violation slack, kWh.
    pub kappa0: f64,
    pub decay_rate: f64,
    pub sample_seed: u64,
    pub fast_cap_per_zone: u32,
    /// Relative gap of the master and iteration solves; the final solve
    /// uses the caller's gap. `None` uses the caller's gap throughout.
    pub master_gap: Option<f64>,
}

impl Default for HeuristicConfig {
    fn default() -> Self {
        Self {
            max_iterations: 5,
            kappa0: 2.0,
            decay_rate: 0.7,
            sample_seed: 0,
            fast_cap_per_zone: 2,
            master_gap: Some(0.01),
        }
    }
}

impl HeuristicConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.kappa0 > 0.0) {
            return Err(Error::invalid("kappa0 must be positive"));
        }
        if !(self.decay_rate > 0.0 && self.decay_rate < 1.0) {
            return Err(Error::invalid("decay rate must lie in (0, 1)"));
        }
        if self.master_gap.is_some_and(|g| !(g >= 0.0)) {
            return Err(Error::invalid("master gap must be >= 0"));
        }
        if self.max_iterations == 0 {
            return Err(Error::invalid("at least one iteration is required"));
        }
        Ok(())
    }
}

/// Slow-charging slack at a 1-based iteration.
pub fn decay_kappa(config: &HeuristicConfig, iteration: usize) -> f64 {
    let e = iteration.max(1) - 1;
    config.kappa0 * config.decay_rate.powi(e.min(i32::MAX as usize) as i32)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationLog {
    pub iteration: usize,
    pub violations_found: usize,
    /// Size of the cumulative fixed set after this iteration.
    pub fixed_slots: usize,
    pub solve_time: f64,
    pub objective: f64,
}

/// Writes one JSON object per line.
pub fn write_logs_jsonl<W: Write>(logs: &[IterationLog], mut out: W) -> Result<()> {
    for log in logs {
        serde_json::to_writer(&mut out, log)?;
        out.write_all(b"\n").map_err(|e| Error::io("iteration log", e))?;
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct HeuristicOutcome {
    pub installation: Installation,
    pub solution: Solution,
    /// Model the returned solution belongs to.
    pub model: PlanningModel,
    pub logs: Vec<IterationLog>,
    pub fixed_fast: BTreeSet<(usize, usize)>,
    /// Zones whose fast fixings were discarded by post-processing.
    pub dropped_zones: Vec<usize>,
    pub final_sample: PpSample,
    /// The final re-solve failed and the master incumbent is returned.
    pub degraded: bool,
    pub wall_time: f64,
}

/// Slots whose scheduled energy the sample cannot deliver.
///
/// Slow charging is flagged when `p >= p' + kappa` outside special zones,
/// fast charging whenever `p > p'`.
pub fn detect_violations(solution: &Solution, model: &PlanningModel, sample: &PpSample, kappa: f64) -> BTreeSet<(usize, usize)> {
    let inst = &model.instance;
    let dt = inst.grid.slot_hours();
    (0..inst.num_trucks())
        .into_par_iter()
        .flat_map_iter(|i| {
            let mut out = Vec::new();
            for k in 0..inst.horizon() {
                if !inst.is_parked(i, k) {
                    continue;
                }
                let Some(j) = solution.charger_at(i, k) else { continue };
                let charger = &inst.chargers[j];
                let bound = charger.slot_energy(dt) * sample.get(i, k, j);
                let p = solution.p[i][k];
                let flagged = match charger.kind {
                    ChargerKind::Slow => !inst.is_special_slot(i, k) && p >= bound + kappa,
                    ChargerKind::Fast => p > bound + FAST_VIOLATION_TOLERANCE,
                };
                if flagged {
                    out.push((i, k));
                }
            }
            out
        })
        .collect()
}

fn solve_checked(model: &PlanningModel, settings: &SolveSettings, warm: Option<&Solution>) -> Result<Solution> {
    let settings = match warm {
        Some(w) if w.status.has_solution() => settings.clone().with_warm_start(w),
        _ => settings.clone(),
    };
    solve(model, &settings)
}

/// Runs the fix-and-optimize loop and the post-processed final solve.
pub fn run_fix_and_optimize(
    instance: &crate::types::FleetInstance,
    moments: &UncertaintyMoments,
    model_config: &ModelConfig,
    config: &HeuristicConfig,
    settings: &SolveSettings,
) -> Result<HeuristicOutcome> {
    config.validate()?;
    moments.validate()?;
    let start = Instant::now();
    if instance.charger_index(ChargerKind::Fast).is_none() {
        return Err(Error::invalid("fix-and-optimize needs a fast charger type"));
    }

    let mut fixed: BTreeSet<(usize, usize)> = model_config.fixed_fast.clone();
    let master_settings = match config.master_gap {
        Some(g) => settings.clone().with_gap(settings.rel_gap.max(g)),
        None => settings.clone(),
    };
    let mut model = build_model(instance, PowerSource::Deterministic, model_config)?;
    let mut incumbent = solve_checked(&model, &master_settings, None)?;
    if !incumbent.status.has_solution() {
        return Err(Error::Infeasible(format!(
            "deterministic master ended with status {}",
            incumbent.status
        )));
    }
    let mut logs = vec![IterationLog {
        iteration: 0,
        violations_found: 0,
        fixed_slots: fixed.len(),
        solve_time: incumbent.wall_time,
        objective: incumbent.objective,
    }];
    let mut sample = sample_pp(moments, &model.instance, config.sample_seed);
    for iteration in 1..=config.max_iterations {
        sample = sample_pp(moments, &model.instance, config.sample_seed + iteration as u64);
        let kappa = decay_kappa(config, iteration);
        let flagged = detect_violations(&incumbent, &model, &sample, kappa);
        let fresh: Vec<(usize, usize)> = flagged.difference(&fixed).copied().collect();
        if fresh.is_empty() {
            logs.push(IterationLog {
                iteration,
                violations_found: flagged.len(),
                fixed_slots: fixed.len(),
                solve_time: 0.0,
                objective: incumbent.objective,
            });
            break;
        }
        let mut next = model.clone();
        crate::model::fix_fast_charging(&mut next, &fresh)?;
        let sol = solve_checked(&next, &master_settings, Some(&incumbent))?;
        if !sol.status.has_solution() {
            log::warn!(
                "iteration {iteration}: {} new fast fixings leave the master {}; keeping the previous incumbent",
                fresh.len(),
                sol.status
            );
            logs.push(IterationLog {
                iteration,
                violations_found: flagged.len(),
                fixed_slots: fixed.len(),
                solve_time: sol.wall_time,
                objective: incumbent.objective,
            });
            break;
        }
        fixed.extend(fresh);
        logs.push(IterationLog {
            iteration,
            violations_found: flagged.len(),
            fixed_slots: fixed.len(),
            solve_time: sol.wall_time,
            objective: sol.objective,
        });
        model = next;
        incumbent = sol;
    }

    // post-processing
    let master_install = extract_installation(&incumbent, &model)?;
    let case_inst = &model.instance;
    let dropped_zones: Vec<usize> = (0..case_inst.zones.len())
        .filter(|&z| master_install.get(z, ChargerKind::Fast) > config.fast_cap_per_zone)
        .collect();
    let kept: BTreeSet<(usize, usize)> = fixed
        .iter()
        .copied()
        .filter(|&(i, k)| case_inst.parking[i][k].is_some_and(|z| !dropped_zones.contains(&z)))
        .collect();
    let occupancy = max_occupancy(case_inst);
    let mut lower = Installation::zeros(case_inst.zones.len());
    let mut upper = Installation::zeros(case_inst.zones.len());
    for z in 0..case_inst.zones.len() {
        let slow = master_install.get(z, ChargerKind::Slow);
        lower.set(z, ChargerKind::Slow, slow);
        upper.set(z, ChargerKind::Slow, occupancy[z].max(slow));
        if dropped_zones.contains(&z) {
            upper.set(z, ChargerKind::Fast, occupancy[z]);
        } else {
            let f = master_install.get(z, ChargerKind::Fast);
            lower.set(z, ChargerKind::Fast, f);
            upper.set(z, ChargerKind::Fast, f);
        }
    }
    if let Some(user) = &model_config.install_lower {
        lower = lower.max_with(user);
        for z in 0..case_inst.zones.len() {
            for kind in [ChargerKind::Slow, ChargerKind::Fast] {
                if upper.get(z, kind) < lower.get(z, kind) {
                    upper.set(z, kind, lower.get(z, kind));
                }
            }
        }
    }
    let final_config = ModelConfig {
        install_lower: Some(lower),
        install_upper: Some(upper),
        fixed_fast: kept.clone(),
        ..model_config.clone()
    };
    let final_model = build_model(instance, PowerSource::Sampled(&sample), &final_config)?;
    let final_sol = solve_checked(&final_model, settings, Some(&incumbent))?;
    let (solution, model, degraded) = if final_sol.status.has_solution() {
        (final_sol, final_model, false)
    } else {
        log::warn!(
            "final re-solve ended with status {}; returning the master incumbent",
            final_sol.status
        );
        (incumbent, model, true)
    };
    let installation = extract_installation(&solution, &model)?;
    Ok(HeuristicOutcome {
        installation,
        solution,
        model,
        logs,
        fixed_fast: if degraded { fixed } else { kept },
        dropped_zones,
        final_sample: sample,
        degraded,
        wall_time: start.elapsed().as_secs_f64(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::SolveStatus;
    use crate::types::{ChargerType, FleetInstance, SlotRef, TimeGrid, Truck, Zone};

    #[test]
    fn kappa_decays_geometrically() {
        let c = HeuristicConfig {
            decay_rate: 0.5,
            ..Default::default()
        };
        assert_eq!(decay_kappa(&c, 1), 2.0);
        assert_eq!(decay_kappa(&c, 3), 0.5);
        let slow = HeuristicConfig {
            decay_rate: 1.0 - 1e-12,
            ..Default::default()
        };
        assert!((decay_kappa(&slow, 50) - 2.0).abs() < 1e-9);
        assert!(HeuristicConfig { decay_rate: 1.0, ..Default::default() }.validate().is_err());
    }

    fn one_slot(p: f64, kind: usize) -> (PlanningModel, Solution, PpSample) {
        let mut inst = FleetInstance::empty(
            TimeGrid::half_hourly(1),
            vec![Truck::new("t", 100.0)],
            vec![Zone::new("Z", false)],
            ChargerType::default_catalog(),
        );
        inst.park(0, SlotRef::new(0, 3), 0, 1.0);
        let model = build_model(&inst, PowerSource::Deterministic, &ModelConfig::default()).unwrap();
        let mut y = vec![vec![vec![0.0; 2]; 48]];
        y[0][3][kind] = 1.0;
        let mut pv = vec![vec![0.0; 48]];
        pv[0][3] = p;
        let sol = Solution {
            status: SolveStatus::Optimal,
            objective: 0.0,
            gap: 0.0,
            wall_time: 0.0,
            backend: "test".into(),
            breakdown: Default::default(),
            values: vec![],
            x: vec![vec![0.0; 2]],
            y,
            a: vec![vec![0.0; 48]],
            w: vec![vec![0.0; 48]],
            b: vec![vec![0.5; 48]],
            p: pv,
            v: vec![vec![0.0; 48]],
            b_init: vec![0.5],
            infeasibility_hint: vec![],
        };
        // slow bound 0.9 * 11.2 * 0.5 * pp = 4.5 kWh at pp = 4.5 / 5.04
        let mut durations = vec![vec![[0.0; 2]; 48]];
        durations[0][3] = [4.5 / 5.04, 0.5];
        (model, sol, PpSample { durations, seed: 0 })
    }

    #[test]
    fn slow_threshold_arithmetic() {
        let (m, s, sample) = one_slot(5.0, 0);
        assert!(detect_violations(&s, &m, &sample, 2.0).is_empty());
        let (m, s, sample) = one_slot(7.0, 0);
        assert_eq!(detect_violations(&s, &m, &sample, 2.0), BTreeSet::from([(0, 3)]));
    }

    #[test]
    fn fast_has_no_slack_and_idle_slots_never_flag() {
        let (m, s, sample) = one_slot(35.7, 1);
        // fast bound 71.25 * 0.5 = 35.625
        assert_eq!(detect_violations(&s, &m, &sample, 2.0).len(), 1);
        let (m, s, sample) = one_slot(35.6, 1);
        assert!(detect_violations(&s, &m, &sample, 2.0).is_empty());
        let (m, mut s, sample) = one_slot(0.0, 0);
        s.y[0][3] = vec![0.0, 0.0];
        assert!(detect_violations(&s, &m, &sample, 0.0).is_empty());
    }
}
