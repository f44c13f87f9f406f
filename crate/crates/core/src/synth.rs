//! Seeded instance generators: tiny instances small enough for exhaustive
//! enumeration, and routine-based fleets for benchmarks and case studies.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{ChargerType, FleetInstance, SlotRef, TimeGrid, Truck, Zone, PP_MIN};

/// Random instance with at most 3 trucks, 8 slots, 2 zones and 6 parking
/// slots in total (7 with a single charger type).
pub fn tiny_instance(seed: u64) -> FleetInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let days = rng.gen_range(1..=2);
    let spd = if days == 2 { rng.gen_range(2..=4) } else { rng.gen_range(4..=8) };
    let grid = TimeGrid {
        days,
        slots_per_day: spd,
        slot_minutes: 30,
    };
    let n = rng.gen_range(1..=3);
    let nz = rng.gen_range(1..=2);
    let zones = (0..nz)
        .map(|z| Zone::new(format!("Z{z}"), z == 0 && rng.gen_bool(0.3)))
        .collect();
    let chargers = if rng.gen_bool(0.5) {
        ChargerType::default_catalog()
    } else {
        vec![ChargerType::slow()]
    };
    let budget = if chargers.len() == 2 { 6 } else { 7 };
    let trucks = (0..n)
        .map(|i| Truck::new(format!("T{i}"), f64::from(rng.gen_range(10..=40))))
        .collect();
    let mut inst = FleetInstance::empty(grid, trucks, zones, chargers);
    let h = grid.horizon();
    let mut used = 0;
    for i in 0..n {
        let mut prev: Option<usize> = None;
        for k in 0..h {
            if used < budget && rng.gen_bool(0.45) {
                let z = match prev {
                    Some(z) if rng.gen_bool(0.7) => z,
                    _ => rng.gen_range(0..nz),
                };
                let pp = f64::from(rng.gen_range(5..=30)) / 30.0;
                inst.park(i, grid.slot_at(k), z, pp);
                used += 1;
                prev = Some(z);
            } else {
                prev = None;
            }
        }
        if inst.parking_slot_count(i) > 0 {
            for k in 0..h {
                if !inst.is_parked(i, k) && rng.gen_bool(0.6) {
                    inst.rho[i][k] = f64::from(rng.gen_range(0..=30)) / 10.0;
                }
            }
        }
    }
    inst
}

/// One recurring stop in a truck's daily routine.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoutineStop {
    pub zone: usize,
    pub start: usize,
    pub len: usize,
    /// Mean effective duration at this stop.
    pub pp_mean: f64,
}

/// Parameters of a routine-based synthetic fleet. Each truck repeats a daily
/// routine: an optional overnight stay in the depot (zone 0, special), a shift
/// of driving with short stops in work zones, and per-day jitter on the
/// effective durations and energy use.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FleetProfile {
    pub trucks: usize,
    pub days: usize,
    pub work_zones: usize,
    pub battery_kwh: f64,
    /// Daily driving energy range, kWh.
    pub daily_energy: (f64, f64),
    /// Fraction of trucks that run around the clock and never visit the depot.
    pub double_shift_share: f64,
    /// Energy multiplier for double-shift trucks.
    pub double_shift_energy: f64,
    /// Number of work stops per shift.
    pub stops: (usize, usize),
    /// Slots per work stop.
    pub stop_len: (usize, usize),
    /// Range of per-stop mean effective durations.
    pub pp_mean: (f64, f64),
    /// Half-width of the daily jitter on effective durations.
    pub pp_jitter: f64,
    /// Effective duration at the depot.
    pub depot_pp: f64,
}

impl Default for FleetProfile {
    fn default() -> Self {
        Self {
            trucks: 10,
            days: 5,
            work_zones: 3,
            battery_kwh: 100.0,
            daily_energy: (20.0, 28.0),
            double_shift_share: 0.3,
            double_shift_energy: 1.6,
            stops: (3, 5),
            stop_len: (1, 3),
            pp_mean: (0.25, 0.75),
            pp_jitter: 0.2,
            depot_pp: 1.0,
        }
    }
}

impl FleetProfile {
    pub fn validate(&self) -> Result<()> {
        if self.trucks == 0 || self.days == 0 {
            return Err(Error::invalid("fleet needs at least one truck and one day"));
        }
        if self.work_zones == 0 || self.stops.0 == 0 || self.stop_len.0 == 0 {
            return Err(Error::invalid("fleet profile has no work stops"));
        }
        if self.stops.0 > self.stops.1 || self.stop_len.0 > self.stop_len.1 || self.daily_energy.0 > self.daily_energy.1 {
            return Err(Error::invalid("fleet profile ranges must be ordered"));
        }
        if !(self.daily_energy.0 >= 0.0 && self.battery_kwh > 0.0) {
            return Err(Error::invalid("fleet profile energies must be positive"));
        }
        Ok(())
    }
}

fn clamp_pp(x: f64) -> f64 {
    // stay on a 1/30 lattice so values survive text round trips exactly
    ((x * 30.0).round() / 30.0).clamp(PP_MIN, 1.0)
}

/// Routine-based fleet instance.
pub fn synthetic_instance(profile: &FleetProfile, seed: u64) -> Result<FleetInstance> {
    profile.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let grid = TimeGrid::half_hourly(profile.days);
    let t = grid.slots_per_day;
    let mut zones = vec![Zone::new("depot", true)];
    zones.extend((0..profile.work_zones).map(|z| Zone::new(format!("W{}", z + 1), false)));
    let trucks = (0..profile.trucks)
        .map(|i| Truck::new(format!("T{i:03}"), profile.battery_kwh))
        .collect();
    let mut inst = FleetInstance::empty(grid, trucks, zones, ChargerType::default_catalog());
    for i in 0..profile.trucks {
        let double = rng.gen_bool(profile.double_shift_share.clamp(0.0, 1.0));
        let (shift_start, shift_end) = if double {
            (0, t)
        } else {
            (rng.gen_range(12..=16), rng.gen_range(36..=40))
        };
        // daily routine: stops spread over the shift
        let n_stops = rng.gen_range(profile.stops.0..=profile.stops.1) * if double { 2 } else { 1 };
        let span = shift_end - shift_start;
        let gap = span / (n_stops + 1);
        let mut routine = Vec::with_capacity(n_stops);
        for s in 0..n_stops {
            let len = rng.gen_range(profile.stop_len.0..=profile.stop_len.1).min(gap.max(2) - 1);
            let start = shift_start + (s + 1) * gap - len / 2;
            if start + len >= shift_end || len == 0 {
                continue;
            }
            routine.push(RoutineStop {
                zone: 1 + rng.gen_range(0..profile.work_zones),
                start,
                len,
                pp_mean: rng.gen_range(profile.pp_mean.0..=profile.pp_mean.1),
            });
        }
        let energy_scale = if double { profile.double_shift_energy } else { 1.0 };
        for d in 0..profile.days {
            for stop in &routine {
                for s in stop.start..stop.start + stop.len {
                    let pp = clamp_pp(stop.pp_mean + rng.gen_range(-profile.pp_jitter..=profile.pp_jitter));
                    inst.park(i, SlotRef::new(d, s), stop.zone, pp);
                }
            }
            if !double {
                for s in (0..shift_start).chain(shift_end..t) {
                    inst.park(i, SlotRef::new(d, s), 0, clamp_pp(profile.depot_pp));
                }
            }
            let driving: Vec<usize> = (shift_start..shift_end)
                .filter(|&s| !inst.is_parked(i, d * t + s))
                .collect();
            if driving.is_empty() {
                continue;
            }
            let daily = rng.gen_range(profile.daily_energy.0..=profile.daily_energy.1) * energy_scale;
            let weights: Vec<f64> = driving.iter().map(|_| rng.gen_range(0.5..1.5)).collect();
            let total: f64 = weights.iter().sum();
            for (s, w) in driving.iter().zip(&weights) {
                // hundredths of a kWh keep the data exactly representable in text
                inst.rho[i][d * t + s] = (daily * w / total * 100.0).round() / 100.0;
            }
        }
    }
    inst.validate()?;
    Ok(inst)
}

/// Fleet whose truck count grows month by month: month `m` (0-based) of
/// `month_days` days has `base + m * step` active trucks; inactive trucks
/// neither drive nor park.
pub fn ramp_instance(profile: &FleetProfile, months: usize, month_days: usize, base: usize, step: usize, seed: u64) -> Result<FleetInstance> {
    let trucks = base + step * months.saturating_sub(1);
    let full = FleetProfile {
        trucks,
        days: months * month_days,
        ..profile.clone()
    };
    let mut inst = synthetic_instance(&full, seed)?;
    let t = inst.grid.slots_per_day;
    for m in 0..months {
        let active = base + step * m;
        for i in active..trucks {
            for k in m * month_days * t..(m + 1) * month_days * t {
                inst.parking[i][k] = None;
                inst.pp[i][k] = 0.0;
                inst.rho[i][k] = 0.0;
            }
        }
    }
    inst.validate()?;
    Ok(inst)
}

/// Random permutation helper kept deterministic for callers that shuffle.
pub fn shuffled(n: usize, seed: u64) -> Vec<usize> {
    let mut v: Vec<usize> = (0..n).collect();
    v.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    v
}
