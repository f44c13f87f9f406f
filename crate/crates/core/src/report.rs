//! Schedule metrics and report files.
//!
//! `metrics.csv` is long format (`zone,hour,metric,value`; blank zone/hour for
//! fleet-wide rows), `soc_summary.csv` and `soc_trajectories.csv` list trucks
//! by descending mean SoC, `violations.csv` lists replay violations.

use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::replay::{Schedule, Violation};
use crate::types::{ChargerKind, FleetInstance};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TruckSoc {
    pub truck: usize,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SlotTotals {
    pub slow_hours: f64,
    pub fast_hours: f64,
    pub abandonment_hours: f64,
    pub energy_kwh: f64,
}

impl SlotTotals {
    fn add(&mut self, kind: Option<ChargerKind>, abandoned: bool, energy: f64, dt: f64) {
        match kind {
            Some(ChargerKind::Slow) => self.slow_hours += dt,
            Some(ChargerKind::Fast) => self.fast_hours += dt,
            None => {}
        }
        if abandoned {
            self.abandonment_hours += dt;
        }
        self.energy_kwh += energy;
    }

    fn rows(&self) -> [(&'static str, f64); 4] {
        [
            ("slow_hours", self.slow_hours),
            ("fast_hours", self.fast_hours),
            ("abandonment_hours", self.abandonment_hours),
            ("energy_kwh", self.energy_kwh),
        ]
    }

    fn set(&mut self, metric: &str, v: f64) -> bool {
        match metric {
            "slow_hours" => self.slow_hours = v,
            "fast_hours" => self.fast_hours = v,
            "abandonment_hours" => self.abandonment_hours = v,
            "energy_kwh" => self.energy_kwh = v,
            _ => return false,
        }
        true
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ScheduleMetrics {
    pub trucks: usize,
    pub days: usize,
    pub fleet: SlotTotals,
    pub avg_charging_hours_per_truck_day: f64,
    /// Charged energy over charging hours; 0 when nothing was charged.
    pub avg_power_kw: f64,
    pub zero_charging: bool,
    /// Sum of `max(0, threshold - soc)` over truck slots.
    pub low_soc_shortfall: f64,
    pub soc_mean: f64,
    pub soc_min: f64,
    pub soc_max: f64,
    /// Descending by mean SoC.
    pub per_truck: Vec<TruckSoc>,
    pub per_zone: Vec<SlotTotals>,
    /// Indexed by hour of day.
    pub per_hour: Vec<SlotTotals>,
}

impl ScheduleMetrics {
    pub fn charging_hours(&self) -> f64 {
        self.fleet.slow_hours + self.fleet.fast_hours
    }
}

/// Metrics of a schedule given the replayed SoC and abandonment flags.
pub fn compute_metrics(inst: &FleetInstance, schedule: &Schedule, soc: &[Vec<f64>], abandoned: &[Vec<bool>]) -> ScheduleMetrics {
    let dt = inst.grid.slot_hours();
    let n = inst.num_trucks();
    let h = inst.horizon();
    let hours_per_day = (inst.grid.slots_per_day as f64 * dt).ceil() as usize;
    let mut m = ScheduleMetrics {
        trucks: n,
        days: inst.grid.days,
        per_zone: vec![SlotTotals::default(); inst.zones.len()],
        per_hour: vec![SlotTotals::default(); hours_per_day.max(1)],
        ..ScheduleMetrics::default()
    };
    if n == 0 {
        return m;
    }
    for i in 0..n {
        for k in 0..h {
            let kind = schedule.charger[i][k].map(|j| inst.chargers[j].kind);
            let ab = abandoned[i][k];
            let e = schedule.energy[i][k];
            m.fleet.add(kind, ab, e, dt);
            if let Some(z) = inst.parking[i][k] {
                m.per_zone[z].add(kind, ab, e, dt);
            }
            let hour = inst.grid.hour_of_day(inst.grid.slot_at(k).slot);
            m.per_hour[hour].add(kind, ab, e, dt);
            m.low_soc_shortfall += (inst.anxiety_threshold - soc[i][k]).max(0.0);
        }
    }
    let ch = m.charging_hours();
    m.zero_charging = ch == 0.0;
    m.avg_power_kw = if ch > 0.0 { m.fleet.energy_kwh / ch } else { 0.0 };
    m.avg_charging_hours_per_truck_day = ch / (n * inst.grid.days) as f64;
    let mut all_min = f64::INFINITY;
    let mut all_max = f64::NEG_INFINITY;
    let mut all_sum = 0.0;
    for (i, row) in soc.iter().enumerate() {
        let mean = row.iter().sum::<f64>() / h as f64;
        let min = row.iter().copied().fold(f64::INFINITY, f64::min);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        all_min = all_min.min(min);
        all_max = all_max.max(max);
        all_sum += row.iter().sum::<f64>();
        m.per_truck.push(TruckSoc { truck: i, mean, min, max });
    }
    m.per_truck
        .sort_by(|a, b| b.mean.total_cmp(&a.mean).then(a.truck.cmp(&b.truck)));
    m.soc_mean = all_sum / (n * h) as f64;
    m.soc_min = all_min;
    m.soc_max = all_max;
    m
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Json,
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            other => Err(Error::invalid(format!("unknown report format `{other}`"))),
        }
    }
}

fn num(v: f64) -> String {
    format!("{v}")
}

/// Writes `metrics.csv` (or `metrics.json`) and `soc_summary.csv`.
pub fn emit_report(metrics: &ScheduleMetrics, format: ReportFormat, out: &Path) -> Result<()> {
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    if format == ReportFormat::Json {
        let path = out.join("metrics.json");
        let text = serde_json::to_string_pretty(metrics)?;
        return fs::write(&path, text).map_err(|e| Error::io(&path, e));
    }
    let path = out.join("metrics.csv");
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record(["zone", "hour", "metric", "value"])?;
    if metrics.trucks > 0 {
        let fleet: Vec<(&str, f64)> = vec![
            ("trucks", metrics.trucks as f64),
            ("days", metrics.days as f64),
            ("avg_charging_hours_per_truck_day", metrics.avg_charging_hours_per_truck_day),
            ("avg_power_kw", metrics.avg_power_kw),
            ("zero_charging", if metrics.zero_charging { 1.0 } else { 0.0 }),
            ("low_soc_shortfall", metrics.low_soc_shortfall),
            ("soc_mean", metrics.soc_mean),
            ("soc_min", metrics.soc_min),
            ("soc_max", metrics.soc_max),
        ];
        for (k, v) in metrics.fleet.rows().into_iter().chain(fleet) {
            w.write_record(["", "", k, &num(v)])?;
        }
        for (z, t) in metrics.per_zone.iter().enumerate() {
            for (k, v) in t.rows() {
                w.write_record([z.to_string().as_str(), "", k, &num(v)])?;
            }
        }
        for (hr, t) in metrics.per_hour.iter().enumerate() {
            for (k, v) in t.rows() {
                w.write_record(["", hr.to_string().as_str(), k, &num(v)])?;
            }
        }
    }
    w.flush().map_err(|e| Error::io(&path, e))?;

    let path = out.join("soc_summary.csv");
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record(["truck", "mean", "min", "max"])?;
    for t in &metrics.per_truck {
        w.write_record([t.truck.to_string(), num(t.mean), num(t.min), num(t.max)])?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;
    Ok(())
}

/// Parses what [`emit_report`] wrote.
pub fn read_report(format: ReportFormat, dir: &Path) -> Result<ScheduleMetrics> {
    if format == ReportFormat::Json {
        let path = dir.join("metrics.json");
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        return Ok(serde_json::from_str(&text)?);
    }
    let path = dir.join("metrics.csv");
    let mut m = ScheduleMetrics::default();
    let mut rdr = csv::Reader::from_path(&path)?;
    for rec in rdr.records() {
        let rec = rec?;
        let (zone, hour, metric, value) = (&rec[0], &rec[1], &rec[2], &rec[3]);
        let v: f64 = value
            .parse()
            .map_err(|_| Error::invalid(format!("{}: bad value `{value}`", path.display())))?;
        let bad = || Error::invalid(format!("{}: unknown metric row {zone},{hour},{metric}", path.display()));
        match (zone.is_empty(), hour.is_empty()) {
            (true, true) => {
                if !m.fleet.set(metric, v) {
                    match metric {
                        "trucks" => m.trucks = v as usize,
                        "days" => m.days = v as usize,
                        "avg_charging_hours_per_truck_day" => m.avg_charging_hours_per_truck_day = v,
                        "avg_power_kw" => m.avg_power_kw = v,
                        "zero_charging" => m.zero_charging = v != 0.0,
                        "low_soc_shortfall" => m.low_soc_shortfall = v,
                        "soc_mean" => m.soc_mean = v,
                        "soc_min" => m.soc_min = v,
                        "soc_max" => m.soc_max = v,
                        _ => return Err(bad()),
                    }
                }
            }
            (false, true) => {
                let z: usize = zone.parse().map_err(|_| bad())?;
                if m.per_zone.len() <= z {
                    m.per_zone.resize(z + 1, SlotTotals::default());
                }
                if !m.per_zone[z].set(metric, v) {
                    return Err(bad());
                }
            }
            (true, false) => {
                let hr: usize = hour.parse().map_err(|_| bad())?;
                if m.per_hour.len() <= hr {
                    m.per_hour.resize(hr + 1, SlotTotals::default());
                }
                if !m.per_hour[hr].set(metric, v) {
                    return Err(bad());
                }
            }
            (false, false) => return Err(bad()),
        }
    }
    let path = dir.join("soc_summary.csv");
    let mut rdr = csv::Reader::from_path(&path)?;
    for row in rdr.deserialize() {
        let t: TruckSoc = row?;
        m.per_truck.push(t);
    }
    Ok(m)
}

pub fn write_violations(violations: &[Violation], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["tag", "truck", "zone", "day", "slot", "amount"])?;
    for v in violations {
        w.write_record([
            v.tag.clone(),
            v.truck.map_or(String::new(), |t| t.to_string()),
            v.zone.map_or(String::new(), |z| z.to_string()),
            v.day.to_string(),
            v.slot.to_string(),
            num(v.amount),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// SoC per truck and slot, trucks ordered by descending mean SoC.
pub fn write_soc_trajectories(inst: &FleetInstance, metrics: &ScheduleMetrics, soc: &[Vec<f64>], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["truck", "day", "slot", "soc"])?;
    for t in &metrics.per_truck {
        for (k, s) in soc[t.truck].iter().enumerate() {
            let at = inst.grid.slot_at(k);
            w.write_record([t.truck.to_string(), at.day.to_string(), at.slot.to_string(), num(*s)])?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}
