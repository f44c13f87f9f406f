//! Slot-by-slot replay of a schedule. This re-implements the operating rules
//! directly (waiting, abandonment, SoC, charger ceilings, zone capacity) and
//! does not look at model rows, so it doubles as an independent check of the
//! MILP encoding.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bundle::fmt_decimal;
use crate::error::{Error, Result};
use crate::installation::Installation;
use crate::lp::RowTag;
use crate::solver::Solution;
use crate::types::{ChargerKind, FleetInstance, SlotRef};
use crate::uncertainty::{PpSample, UncertaintyMoments};

pub const RULE_TOLERANCE: f64 = 1e-6;
pub const CEILING_TOLERANCE: f64 = 1e-9;

/// Per-slot charging decisions plus the SoC each truck enters the horizon with.
#[derive(Debug, Clone, PartialEq)]
pub struct Schedule {
    /// `[truck][slot]` catalog position of the charger used.
    pub charger: Vec<Vec<Option<usize>>>,
    pub abandon: Vec<Vec<bool>>,
    /// Battery-side energy charged, kWh.
    pub energy: Vec<Vec<f64>>,
    pub initial_soc: Vec<f64>,
}

impl Schedule {
    pub fn empty(trucks: usize, horizon: usize, initial_soc: f64) -> Self {
        Self {
            charger: vec![vec![None; horizon]; trucks],
            abandon: vec![vec![false; horizon]; trucks],
            energy: vec![vec![0.0; horizon]; trucks],
            initial_soc: vec![initial_soc; trucks],
        }
    }

    pub fn from_solution(solution: &Solution) -> Self {
        let n = solution.y.len();
        let h = solution.y.first().map_or(0, Vec::len);
        let mut s = Schedule::empty(n, h, 0.0);
        for i in 0..n {
            for k in 0..h {
                s.charger[i][k] = solution.charger_at(i, k);
                s.abandon[i][k] = solution.a[i][k] > 0.5;
                s.energy[i][k] = solution.p[i][k].max(0.0);
            }
        }
        s.initial_soc = solution.b_init.clone();
        s
    }

    /// Path of the initial-SoC table written next to a schedule file.
    pub fn initial_soc_path(path: &Path) -> PathBuf {
        path.with_file_name("initial_soc.csv")
    }

    pub fn write_csv(&self, inst: &FleetInstance, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["truck", "day", "slot", "charger", "abandon", "energy_kwh"])?;
        for i in 0..self.charger.len() {
            for k in 0..self.charger[i].len() {
                let c = self.charger[i][k];
                if c.is_none() && !self.abandon[i][k] && self.energy[i][k] == 0.0 {
                    continue;
                }
                let at = inst.grid.slot_at(k);
                w.write_record([
                    i.to_string(),
                    at.day.to_string(),
                    at.slot.to_string(),
                    c.map_or(String::new(), |j| inst.chargers[j].kind.as_str().to_string()),
                    u8::from(self.abandon[i][k]).to_string(),
                    fmt_decimal(self.energy[i][k]),
                ])?;
            }
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        let soc_path = Self::initial_soc_path(path);
        let mut w = csv::Writer::from_path(&soc_path)?;
        w.write_record(["truck", "soc"])?;
        for (i, s) in self.initial_soc.iter().enumerate() {
            w.write_record([i.to_string(), fmt_decimal(*s)])?;
        }
        w.flush().map_err(|e| Error::io(&soc_path, e))?;
        Ok(())
    }

    /// Reads a schedule; without an initial-SoC table every truck starts full.
    pub fn read_csv(inst: &FleetInstance, path: &Path) -> Result<Self> {
        #[derive(Deserialize)]
        struct Row {
            truck: usize,
            day: usize,
            slot: usize,
            charger: String,
            abandon: u8,
            energy_kwh: f64,
        }
        let mut s = Schedule::empty(inst.num_trucks(), inst.horizon(), inst.soc_max);
        let mut rdr = csv::Reader::from_path(path)?;
        for row in rdr.deserialize() {
            let r: Row = row?;
            let at = SlotRef::new(r.day, r.slot);
            if r.truck >= inst.num_trucks() || !inst.grid.contains(at) {
                return Err(Error::OutOfRange(format!(
                    "{}: ({}, {}, {}) outside the instance",
                    path.display(),
                    r.truck,
                    r.day,
                    r.slot
                )));
            }
            let k = inst.grid.index(at);
            if !r.charger.trim().is_empty() {
                let kind = ChargerKind::parse(&r.charger)?;
                let j = inst
                    .charger_index(kind)
                    .ok_or_else(|| Error::invalid(format!("charger `{}` not in the catalog", r.charger)))?;
                s.charger[r.truck][k] = Some(j);
            }
            s.abandon[r.truck][k] = r.abandon != 0;
            s.energy[r.truck][k] = r.energy_kwh;
        }
        let soc_path = Self::initial_soc_path(path);
        if soc_path.exists() {
            let mut rdr = csv::Reader::from_path(&soc_path)?;
            for row in rdr.deserialize() {
                let (i, soc): (usize, f64) = row?;
                if i >= inst.num_trucks() {
                    return Err(Error::OutOfRange(format!("{}: truck {i}", soc_path.display())));
                }
                s.initial_soc[i] = soc;
            }
        } else {
            log::warn!("{} missing; replaying from full batteries", soc_path.display());
        }
        Ok(s)
    }
}

/// Effective parking durations used for the replay.
#[derive(Debug, Clone, Copy)]
pub enum PpRealization<'a> {
    /// The instance durations.
    Planning,
    Sampled(&'a PpSample),
    /// Lower edge of the uncertainty box.
    Lower(&'a UncertaintyMoments),
}

impl PpRealization<'_> {
    /// Deliverable battery-side energy with charger `j` at a parking slot.
    pub fn capacity(&self, inst: &FleetInstance, truck: usize, index: usize, j: usize) -> f64 {
        let full = inst.chargers[j].slot_energy(inst.grid.slot_hours());
        match self {
            PpRealization::Planning => full * inst.pp[truck][index],
            PpRealization::Sampled(s) => full * s.get(truck, index, j),
            PpRealization::Lower(m) => m
                .coefficient_at(inst, truck, index, j)
                .unwrap_or(full * inst.pp[truck][index]),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReplayOptions {
    /// Low SoC grants one extra waiting slot.
    pub anxiety: bool,
}

impl Default for ReplayOptions {
    fn default() -> Self {
        Self { anxiety: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub tag: String,
    pub truck: Option<usize>,
    pub zone: Option<usize>,
    pub day: usize,
    pub slot: usize,
    pub amount: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplayResult {
    pub feasible: bool,
    pub violations: Vec<Violation>,
    /// End-of-slot SoC, `[truck][slot]`.
    pub soc: Vec<Vec<f64>>,
    /// Waiting time entering each slot, hours.
    pub waiting: Vec<Vec<f64>>,
    /// Slots on which the truck has given up waiting.
    pub abandoned: Vec<Vec<bool>>,
    pub metrics: crate::report::ScheduleMetrics,
}

struct TruckTrace {
    soc: Vec<f64>,
    waiting: Vec<f64>,
    abandoned: Vec<bool>,
    violations: Vec<Violation>,
}

fn replay_truck(inst: &FleetInstance, schedule: &Schedule, pp: &PpRealization<'_>, opts: ReplayOptions, i: usize) -> TruckTrace {
    let h = inst.horizon();
    let dt = inst.grid.slot_hours();
    let e = inst.trucks[i].battery_kwh;
    let theta = inst.anxiety_threshold;
    let mut out = TruckTrace {
        soc: vec![0.0; h],
        waiting: vec![0.0; h],
        abandoned: vec![false; h],
        violations: Vec::new(),
    };
    let mut flag = |tag: RowTag, k: usize, amount: f64, zone: Option<usize>| {
        let at = inst.grid.slot_at(k);
        out.violations.push(Violation {
            tag: tag.as_str().to_string(),
            truck: Some(i),
            zone,
            day: at.day,
            slot: at.slot,
            amount,
        });
    };
    let init = schedule.initial_soc[i];
    if init < inst.soc_min - RULE_TOLERANCE || init > inst.soc_max + RULE_TOLERANCE {
        flag(RowTag::SocBounds, 0, init, None);
    }
    let mut soc = init;
    let mut w = 0.0;
    let mut gave_up = false;
    let mut pending_ceiling: Option<f64> = None;
    let mut socs = vec![0.0; h];
    let mut waits = vec![0.0; h];
    let mut abandoned = vec![false; h];
    for k in 0..h {
        let zone = inst.parking[i][k];
        let charger = schedule.charger[i][k];
        let energy = schedule.energy[i][k];
        let abandon = schedule.abandon[i][k];
        match zone {
            None => {
                if charger.is_some() || abandon || energy > RULE_TOLERANCE {
                    flag(RowTag::ParkingWindow, k, energy, None);
                }
                w = 0.0;
                gave_up = false;
            }
            Some(z) => {
                let starts = k == 0 || inst.parking[i][k - 1] != zone;
                if starts {
                    w = 0.0;
                    gave_up = false;
                } else {
                    let charged_prev = schedule.charger[i][k - 1].is_some();
                    w += if charged_prev { 0.0 } else { dt };
                    if schedule.abandon[i][k - 1] && !abandon {
                        flag(RowTag::AbandonMonotone, k, 1.0, Some(z));
                    }
                }
                if charger.is_some() && abandon {
                    flag(RowTag::AbandonNoCharge, k, 1.0, Some(z));
                }
                let cap = match charger {
                    Some(j) => pp.capacity(inst, i, k, j),
                    None => 0.0,
                };
                if energy > cap + RULE_TOLERANCE {
                    flag(RowTag::PowerBound, k, energy - cap, Some(z));
                }
            }
        }
        soc += (energy - inst.rho[i][k]) / e;
        socs[k] = soc;
        waits[k] = if zone.is_some() { w } else { 0.0 };
        if let Some(ceil) = pending_ceiling.take() {
            if soc > ceil + CEILING_TOLERANCE {
                flag(RowTag::FastCapDuring, k, soc - ceil, zone);
            }
        }
        if let Some(j) = charger {
            let c = &inst.chargers[j];
            if c.soc_ceiling < inst.soc_max {
                if soc > c.soc_ceiling + CEILING_TOLERANCE {
                    flag(RowTag::FastCapBefore, k, soc - c.soc_ceiling, zone);
                }
                pending_ceiling = Some(c.soc_ceiling);
            }
        }
        if soc < inst.soc_min - RULE_TOLERANCE || soc > inst.soc_max + RULE_TOLERANCE {
            flag(RowTag::SocBounds, k, soc, zone);
        }
        if let Some(z) = zone {
            if !inst.zones[z].is_special {
                let cap = if opts.anxiety && soc <= theta + RULE_TOLERANCE { dt } else { 0.0 };
                if w > cap + RULE_TOLERANCE {
                    gave_up = true;
                }
            }
            abandoned[k] = gave_up || abandon;
            if gave_up {
                if !abandon {
                    flag(RowTag::WaitCap, k, w, Some(z));
                }
                if charger.is_some() {
                    flag(RowTag::AbandonNoCharge, k, 1.0, Some(z));
                }
            }
        }
    }
    if (soc - init).abs() > RULE_TOLERANCE {
        flag(RowTag::Cyclic, h.saturating_sub(1), soc - init, None);
    }
    out.soc = socs;
    out.waiting = waits;
    out.abandoned = abandoned;
    out
}

/// Replays a schedule against an installation under a duration realization.
pub fn replay(
    inst: &FleetInstance,
    installation: &Installation,
    schedule: &Schedule,
    pp: PpRealization<'_>,
    opts: ReplayOptions,
) -> Result<ReplayResult> {
    let n = inst.num_trucks();
    let h = inst.horizon();
    if schedule.charger.len() != n || schedule.charger.iter().any(|r| r.len() != h) || schedule.initial_soc.len() != n {
        return Err(Error::invalid("schedule shape does not match the instance"));
    }
    let traces: Vec<TruckTrace> = (0..n)
        .into_par_iter()
        .map(|i| replay_truck(inst, schedule, &pp, opts, i))
        .collect();
    let mut violations: Vec<Violation> = traces.iter().flat_map(|t| t.violations.iter().cloned()).collect();

    // zone capacity, sequential over slots
    for k in 0..h {
        let mut in_use = vec![[0u32; 2]; inst.zones.len()];
        for i in 0..n {
            if let (Some(z), Some(j)) = (inst.parking[i][k], schedule.charger[i][k]) {
                in_use[z][inst.chargers[j].kind as usize] += 1;
            }
        }
        for (z, used) in in_use.iter().enumerate() {
            for kind in [ChargerKind::Slow, ChargerKind::Fast] {
                let have = installation.get(z, kind);
                if used[kind as usize] > have {
                    let at = inst.grid.slot_at(k);
                    violations.push(Violation {
                        tag: RowTag::Capacity.as_str().to_string(),
                        truck: None,
                        zone: Some(z),
                        day: at.day,
                        slot: at.slot,
                        amount: f64::from(used[kind as usize] - have),
                    });
                }
            }
        }
    }

    let soc: Vec<Vec<f64>> = traces.iter().map(|t| t.soc.clone()).collect();
    let abandoned: Vec<Vec<bool>> = traces.iter().map(|t| t.abandoned.clone()).collect();
    let metrics = crate::report::compute_metrics(inst, schedule, &soc, &abandoned);
    Ok(ReplayResult {
        feasible: violations.is_empty(),
        violations,
        waiting: traces.into_iter().map(|t| t.waiting).collect(),
        soc,
        abandoned,
        metrics,
    })
}

/// Installation, schedule and replay of a solved model under its own durations.
pub fn replay_solution(
    model: &crate::model::PlanningModel,
    solution: &Solution,
    moments: Option<&UncertaintyMoments>,
    sample: Option<&PpSample>,
) -> Result<ReplayResult> {
    let installation = crate::solver::extract_installation(solution, model)?;
    let schedule = Schedule::from_solution(solution);
    let pp = match (model.mode, moments, sample) {
        (crate::model::ModelMode::Robust, Some(m), _) => PpRealization::Lower(m),
        (crate::model::ModelMode::Sampled, _, Some(s)) => PpRealization::Sampled(s),
        (crate::model::ModelMode::Deterministic, _, _) => PpRealization::Planning,
        _ => return Err(Error::invalid("replay needs the moments or sample the model was built with")),
    };
    let opts = ReplayOptions {
        anxiety: model.case != crate::model::CaseProfile::NoAnxiety,
    };
    replay(&model.instance, &installation, &schedule, pp, opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{ChargerType, TimeGrid, Truck, Zone};

    fn inst() -> FleetInstance {
        let grid = TimeGrid::new(2, 4, 30).unwrap();
        FleetInstance::empty(
            grid,
            vec![Truck::new("t", 100.0)],
            vec![Zone::new("Z1", false), Zone::new("Z2", false)],
            ChargerType::default_catalog(),
        )
    }

    #[test]
    fn waiting_carries_over_the_day_boundary() {
        let mut f = inst();
        for at in [SlotRef::new(0, 2), SlotRef::new(0, 3), SlotRef::new(1, 0)] {
            f.park(0, at, 0, 1.0);
        }
        let s = Schedule::empty(1, 8, 0.9);
        let r = replay(&f, &Installation::zeros(2), &s, PpRealization::Planning, ReplayOptions::default()).unwrap();
        assert_eq!(&r.waiting[0][2..5], &[0.0, 0.5, 1.0]);
        // no charging at high SoC: the driver gives up from the second slot
        assert_eq!(&r.abandoned[0][2..5], &[false, true, true]);
        assert!(r.violations.iter().all(|v| v.tag == "waitcap"));
    }

    #[test]
    fn zone_change_resets_waiting() {
        let mut f = inst();
        f.park(0, SlotRef::new(0, 1), 0, 1.0);
        f.park(0, SlotRef::new(0, 2), 0, 1.0);
        f.park(0, SlotRef::new(0, 3), 1, 1.0);
        let s = Schedule::empty(1, 8, 0.9);
        let r = replay(&f, &Installation::zeros(2), &s, PpRealization::Planning, ReplayOptions::default()).unwrap();
        assert_eq!(&r.waiting[0][1..4], &[0.0, 0.5, 0.0]);
    }

    #[test]
    fn capacity_and_power_violations_are_tagged() {
        let mut f = inst();
        f.park(0, SlotRef::new(0, 0), 0, 0.5);
        let mut s = Schedule::empty(1, 8, 0.5);
        s.charger[0][0] = Some(0);
        s.energy[0][0] = 3.0;
        f.set_rho(0, SlotRef::new(0, 2), 3.0);
        let r = replay(&f, &Installation::zeros(2), &s, PpRealization::Planning, ReplayOptions::default()).unwrap();
        let tags: Vec<&str> = r.violations.iter().map(|v| v.tag.as_str()).collect();
        assert!(tags.contains(&"powerbound"));
        assert!(tags.contains(&"capacity"));
        assert!(!r.feasible);
    }

    #[test]
    fn schedule_csv_round_trip() {
        let mut f = inst();
        f.park(0, SlotRef::new(0, 1), 0, 1.0);
        f.park(0, SlotRef::new(0, 2), 0, 1.0);
        let mut s = Schedule::empty(1, 8, 0.4);
        s.charger[0][1] = Some(1);
        s.energy[0][1] = 71.25;
        s.abandon[0][2] = true;
        s.initial_soc[0] = 0.123456789;
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("schedule.csv");
        s.write_csv(&f, &p).unwrap();
        assert_eq!(Schedule::read_csv(&f, &p).unwrap(), s);
    }
}
