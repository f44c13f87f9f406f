//! GPS traces to gridded instances: stop detection on a square grid, zone
//! ranking, parking windows with effective durations, and temperature-aware
//! energy use. Also a seeded trace generator for a synthetic site.

use std::collections::{BTreeMap, HashMap};
use std::f64::consts::PI;
use std::path::Path;

use chrono::{DateTime, NaiveDateTime};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{ChargerType, FleetInstance, TimeGrid, Truck, Zone, PP_MIN};

pub const METERS_PER_MILE: f64 = 1_609.344;
const DAY_SECONDS: i64 = 86_400;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GpsPoint {
    /// Seconds since the Unix epoch.
    pub timestamp: i64,
    pub easting: f64,
    pub northing: f64,
    /// m/s.
    pub speed: f64,
}

/// Per-truck streams, keyed by truck id.
pub type GpsFleet = BTreeMap<String, Vec<GpsPoint>>;

pub type Cell = (i64, i64);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StopEvent {
    pub truck: String,
    /// `(row, col)` of the cell holding the anchor point.
    pub cell: Cell,
    pub start: i64,
    pub end: i64,
    /// Minutes.
    pub duration: f64,
}

fn parse_timestamp(s: &str) -> Result<i64> {
    if let Ok(t) = DateTime::parse_from_rfc3339(s) {
        return Ok(t.timestamp());
    }
    for fmt in ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M:%S"] {
        if let Ok(t) = NaiveDateTime::parse_from_str(s, fmt) {
            return Ok(t.and_utc().timestamp());
        }
    }
    Err(Error::invalid(format!("unrecognised timestamp `{s}`")))
}

fn format_timestamp(t: i64) -> String {
    DateTime::from_timestamp(t, 0)
        .map(|d| d.format("%Y-%m-%dT%H:%M:%SZ").to_string())
        .unwrap_or_else(|| t.to_string())
}

/// Rejects streams whose timestamps are not strictly increasing.
pub fn check_sorted(truck: &str, points: &[GpsPoint]) -> Result<()> {
    for w in points.windows(2) {
        if w[1].timestamp <= w[0].timestamp {
            return Err(Error::UnsortedStream {
                truck: truck.to_string(),
                prev: w[0].timestamp,
                at: w[1].timestamp,
            });
        }
    }
    if points.iter().any(|p| !(p.easting.is_finite() && p.northing.is_finite())) {
        return Err(Error::invalid(format!("non-finite coordinates for truck {truck}")));
    }
    Ok(())
}

/// Reads `truck_id,iso_timestamp,easting_m,northing_m,speed_mps`.
pub fn read_gps_csv(path: &Path) -> Result<GpsFleet> {
    #[derive(Deserialize)]
    struct Row {
        truck_id: String,
        iso_timestamp: String,
        easting_m: f64,
        northing_m: f64,
        speed_mps: f64,
    }
    let mut rdr = csv::Reader::from_path(path)?;
    let mut fleet = GpsFleet::new();
    for row in rdr.deserialize() {
        let r: Row = row?;
        fleet.entry(r.truck_id).or_default().push(GpsPoint {
            timestamp: parse_timestamp(&r.iso_timestamp)?,
            easting: r.easting_m,
            northing: r.northing_m,
            speed: r.speed_mps,
        });
    }
    for (truck, pts) in &fleet {
        check_sorted(truck, pts)?;
    }
    Ok(fleet)
}

pub fn write_gps_csv(fleet: &GpsFleet, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["truck_id", "iso_timestamp", "easting_m", "northing_m", "speed_mps"])?;
    for (truck, pts) in fleet {
        for p in pts {
            w.write_record([
                truck.clone(),
                format_timestamp(p.timestamp),
                format!("{:.3}", p.easting),
                format!("{:.3}", p.northing),
                format!("{:.3}", p.speed),
            ])?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Inserts linearly interpolated points so no gap exceeds `max_period` seconds.
pub fn resample(points: &[GpsPoint], max_period: i64) -> Vec<GpsPoint> {
    let mut out = Vec::with_capacity(points.len());
    for (n, p) in points.iter().enumerate() {
        if n > 0 {
            let q = &points[n - 1];
            let gap = p.timestamp - q.timestamp;
            if gap > max_period {
                let steps = (gap + max_period - 1) / max_period;
                for s in 1..steps {
                    let f = s as f64 / steps as f64;
                    out.push(GpsPoint {
                        timestamp: q.timestamp + gap * s / steps,
                        easting: q.easting + f * (p.easting - q.easting),
                        northing: q.northing + f * (p.northing - q.northing),
                        speed: q.speed + f * (p.speed - q.speed),
                    });
                }
            }
        }
        out.push(*p);
    }
    out
}

fn dist(a: &GpsPoint, b: &GpsPoint) -> f64 {
    (a.easting - b.easting).hypot(a.northing - b.northing)
}

pub fn cell_of(p: &GpsPoint, cell_size: f64) -> Cell {
    ((p.northing / cell_size).floor() as i64, (p.easting / cell_size).floor() as i64)
}

/// Anchor-based stop detection: a stop is a maximal run of points that stay
/// within `move_threshold` metres of its first point for at least
/// `min_dwell` minutes.
pub fn detect_stops(truck: &str, points: &[GpsPoint], cell_size: f64, move_threshold: f64, min_dwell: f64) -> Result<Vec<StopEvent>> {
    if !(cell_size > move_threshold && move_threshold > 0.0) {
        return Err(Error::invalid("need cell_size > move_threshold > 0"));
    }
    check_sorted(truck, points)?;
    let mut out = Vec::new();
    let mut a = 0;
    while a < points.len() {
        let anchor = &points[a];
        let mut j = a + 1;
        while j < points.len() && dist(&points[j], anchor) < move_threshold {
            j += 1;
        }
        let last = &points[j - 1];
        let minutes = (last.timestamp - anchor.timestamp) as f64 / 60.0;
        if minutes >= min_dwell {
            out.push(StopEvent {
                truck: truck.to_string(),
                cell: cell_of(anchor, cell_size),
                start: anchor.timestamp,
                end: last.timestamp,
                duration: minutes,
            });
            a = j;
        } else {
            a += 1;
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedZone {
    pub cell: Cell,
    pub stops: usize,
    pub stopped_minutes: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ZoneRanking {
    pub zones: Vec<RankedZone>,
    /// Fewer than the requested number of cells had stops.
    pub short: bool,
}

/// The `k` cells with the most stops; ties go to longer total stopped time,
/// then to the smaller cell index.
pub fn rank_zones(stops: &[StopEvent], k: usize) -> Result<ZoneRanking> {
    if k == 0 {
        return Err(Error::invalid("k must be at least 1"));
    }
    let mut acc: BTreeMap<Cell, (usize, f64)> = BTreeMap::new();
    for s in stops {
        let e = acc.entry(s.cell).or_insert((0, 0.0));
        e.0 += 1;
        e.1 += s.duration;
    }
    let mut zones: Vec<RankedZone> = acc
        .into_iter()
        .map(|(cell, (stops, stopped_minutes))| RankedZone {
            cell,
            stops,
            stopped_minutes,
        })
        .collect();
    zones.sort_by(|a, b| {
        b.stops
            .cmp(&a.stops)
            .then(b.stopped_minutes.total_cmp(&a.stopped_minutes))
            .then(a.cell.cmp(&b.cell))
    });
    let short = zones.len() < k;
    zones.truncate(k);
    Ok(ZoneRanking { zones, short })
}

/// Parking windows and effective durations for one truck. A slot is parked
/// when at least five stopped minutes in a zone fall inside it; the zone with
/// the most minutes wins and `pp = minutes / slot length`, clamped.
pub fn extract_windows(stops: &[StopEvent], zones: &[Cell], grid: &TimeGrid, origin: i64) -> (Vec<Option<usize>>, Vec<f64>) {
    let h = grid.horizon();
    let slot_secs = i64::from(grid.slot_minutes) * 60;
    let index: HashMap<Cell, usize> = zones.iter().enumerate().map(|(z, c)| (*c, z)).collect();
    let mut minutes: Vec<BTreeMap<usize, f64>> = vec![BTreeMap::new(); h];
    for s in stops {
        let Some(&z) = index.get(&s.cell) else { continue };
        let first = ((s.start - origin).max(0) / slot_secs) as usize;
        let last = (((s.end - origin).max(0) / slot_secs) as usize).min(h.saturating_sub(1));
        for (k, m) in minutes.iter_mut().enumerate().take(last + 1).skip(first) {
            let lo = origin + k as i64 * slot_secs;
            let hi = lo + slot_secs;
            let overlap = (s.end.min(hi) - s.start.max(lo)).max(0) as f64 / 60.0;
            if overlap > 0.0 {
                *m.entry(z).or_insert(0.0) += overlap;
            }
        }
    }
    let mut parking = vec![None; h];
    let mut pp = vec![0.0; h];
    let full = f64::from(grid.slot_minutes);
    for k in 0..h {
        let best = minutes[k]
            .iter()
            .fold(None::<(usize, f64)>, |acc, (&z, &m)| match acc {
                Some((_, bm)) if bm >= m => acc,
                _ => Some((z, m)),
            });
        if let Some((z, m)) = best {
            if m >= 5.0 - 1e-9 {
                parking[k] = Some(z);
                pp[k] = (m / full).clamp(PP_MIN, 1.0);
            }
        }
    }
    (parking, pp)
}

/// Quadratic temperature to economy map, miles per kWh, with an hourly
/// temperature series (°F) starting at the horizon origin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FuelEconomyModel {
    pub a2: f64,
    pub a1: f64,
    pub a0: f64,
    pub temperatures: Vec<f64>,
}

impl FuelEconomyModel {
    /// Peak 3.4 mi/kWh at 70 °F, 3.0 at 20 °F and 120 °F.
    pub fn with_temperatures(temperatures: Vec<f64>) -> Self {
        Self {
            a2: -1.6e-4,
            a1: 0.0224,
            a0: 2.616,
            temperatures,
        }
    }

    pub fn economy(&self, temp_f: f64) -> f64 {
        self.a2 * temp_f * temp_f + self.a1 * temp_f + self.a0
    }

    /// Economy at an hour offset, holding the last temperature past the end.
    pub fn economy_at_hour(&self, hour: usize) -> f64 {
        let t = self
            .temperatures
            .get(hour)
            .or(self.temperatures.last())
            .copied()
            .unwrap_or(70.0);
        self.economy(t)
    }

    pub fn validate(&self) -> Result<()> {
        for (hour, &t) in self.temperatures.iter().enumerate() {
            let economy = self.economy(t);
            if !(economy > 0.0 && economy <= 10.0) {
                return Err(Error::NonPositiveEconomy { hour, economy });
            }
        }
        if self.temperatures.is_empty() {
            let economy = self.economy(70.0);
            if !(economy > 0.0) {
                return Err(Error::NonPositiveEconomy { hour: 0, economy });
            }
        }
        Ok(())
    }
}

/// Reads `hour_of_year,temp_f`; hours are offsets from the horizon origin and
/// gaps hold the previous value.
pub fn read_temperature_csv(path: &Path) -> Result<Vec<f64>> {
    #[derive(Deserialize)]
    struct Row {
        hour_of_year: usize,
        temp_f: f64,
    }
    let mut rdr = csv::Reader::from_path(path)?;
    let mut rows: Vec<Row> = rdr.deserialize().collect::<std::result::Result<_, _>>()?;
    if rows.is_empty() {
        return Err(Error::invalid(format!("{} has no temperatures", path.display())));
    }
    rows.sort_by_key(|r| r.hour_of_year);
    let n = rows.last().map_or(0, |r| r.hour_of_year + 1);
    let mut out = vec![f64::NAN; n];
    for r in &rows {
        out[r.hour_of_year] = r.temp_f;
    }
    let mut prev = rows[0].temp_f;
    for t in out.iter_mut() {
        if t.is_nan() {
            *t = prev;
        } else {
            prev = *t;
        }
    }
    Ok(out)
}

pub fn write_temperature_csv(temps: &[f64], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["hour_of_year", "temp_f"])?;
    for (h, t) in temps.iter().enumerate() {
        w.write_record([h.to_string(), format!("{t:.2}")])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Per-slot energy (kWh) and driven distance (km) for one truck. Segments
/// whose midpoint lies in a charging-zone cell do not count toward energy.
pub fn compute_energy(
    points: &[GpsPoint],
    model: &FuelEconomyModel,
    grid: &TimeGrid,
    zones: &[Cell],
    cell_size: f64,
    origin: i64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    model.validate()?;
    let h = grid.horizon();
    let slot_secs = i64::from(grid.slot_minutes) * 60;
    let zone_set: std::collections::HashSet<Cell> = zones.iter().copied().collect();
    let mut miles = vec![0.0; h];
    let mut km = vec![0.0; h];
    for w in points.windows(2) {
        let (p, q) = (&w[0], &w[1]);
        let d = dist(p, q);
        if d == 0.0 || q.timestamp <= p.timestamp {
            continue;
        }
        let mid = GpsPoint {
            timestamp: (p.timestamp + q.timestamp) / 2,
            easting: 0.5 * (p.easting + q.easting),
            northing: 0.5 * (p.northing + q.northing),
            speed: 0.0,
        };
        let in_zone = zone_set.contains(&cell_of(&mid, cell_size));
        // split the segment over the slots it spans in proportion to time
        let span = (q.timestamp - p.timestamp) as f64;
        let mut t = p.timestamp.max(origin);
        while t < q.timestamp {
            let k = ((t - origin) / slot_secs) as usize;
            let end = (origin + (k as i64 + 1) * slot_secs).min(q.timestamp);
            if k >= h {
                break;
            }
            let share = d * (end - t) as f64 / span;
            km[k] += share / 1000.0;
            if !in_zone {
                miles[k] += share / METERS_PER_MILE;
            }
            t = end;
        }
    }
    let rho = miles
        .iter()
        .enumerate()
        .map(|(k, m)| {
            if *m == 0.0 {
                return 0.0;
            }
            let hour = k * grid.slot_minutes as usize / 60;
            m / model.economy_at_hour(hour)
        })
        .collect();
    Ok((rho, km))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestConfig {
    pub cell_size: f64,
    pub move_threshold: f64,
    /// Minutes.
    pub min_dwell: f64,
    /// Seconds; coarser streams are interpolated.
    pub max_sampling: i64,
    pub zones: usize,
    /// Ranks (0-based) of zones flagged special.
    pub special_ranks: Vec<usize>,
    pub slot_minutes: u32,
    pub battery_kwh: f64,
}

impl Default for IngestConfig {
    fn default() -> Self {
        Self {
            cell_size: 100.0,
            move_threshold: 50.0,
            min_dwell: 5.0,
            max_sampling: 60,
            zones: 8,
            special_ranks: Vec::new(),
            slot_minutes: 30,
            battery_kwh: 100.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct IngestOutput {
    pub instance: FleetInstance,
    pub ranking: ZoneRanking,
    pub stops: usize,
    /// Epoch seconds of the first slot.
    pub origin: i64,
}

/// The whole pipeline. Trucks are processed concurrently and merged in id
/// order.
pub fn build_instance(fleet: &GpsFleet, economy: &FuelEconomyModel, config: &IngestConfig) -> Result<IngestOutput> {
    if fleet.is_empty() {
        return Err(Error::invalid("no GPS streams"));
    }
    economy.validate()?;
    let ids: Vec<&String> = fleet.keys().collect();
    let streams: Vec<Vec<GpsPoint>> = ids
        .par_iter()
        .map(|id| {
            let pts = &fleet[*id];
            check_sorted(id, pts)?;
            Ok(resample(pts, config.max_sampling))
        })
        .collect::<Result<_>>()?;
    let stops: Vec<Vec<StopEvent>> = ids
        .par_iter()
        .zip(&streams)
        .map(|(id, pts)| detect_stops(id, pts, config.cell_size, config.move_threshold, config.min_dwell))
        .collect::<Result<_>>()?;
    let all: Vec<StopEvent> = stops.iter().flatten().cloned().collect();
    let ranking = rank_zones(&all, config.zones)?;
    if ranking.short {
        log::warn!("only {} cells with stops; wanted {}", ranking.zones.len(), config.zones);
    }
    let cells: Vec<Cell> = ranking.zones.iter().map(|z| z.cell).collect();

    let first = streams.iter().filter_map(|s| s.first()).map(|p| p.timestamp).min();
    let last = streams.iter().filter_map(|s| s.last()).map(|p| p.timestamp).max();
    let (Some(first), Some(last)) = (first, last) else {
        return Err(Error::invalid("GPS streams are empty"));
    };
    let origin = first.div_euclid(DAY_SECONDS) * DAY_SECONDS;
    let days = ((last - origin) / DAY_SECONDS + 1) as usize;
    let slots_per_day = (24 * 60 / config.slot_minutes) as usize;
    let grid = TimeGrid::new(days, slots_per_day, config.slot_minutes)?;

    let per_truck: Vec<(Vec<Option<usize>>, Vec<f64>, Vec<f64>, Vec<f64>)> = stops
        .par_iter()
        .zip(&streams)
        .map(|(s, pts)| {
            let (parking, pp) = extract_windows(s, &cells, &grid, origin);
            let (rho, km) = compute_energy(pts, economy, &grid, &cells, config.cell_size, origin)?;
            Ok((parking, pp, rho, km))
        })
        .collect::<Result<_>>()?;

    let zones = cells
        .iter()
        .enumerate()
        .map(|(r, _)| Zone::new(format!("Z{}", r + 1), config.special_ranks.contains(&r)))
        .collect();
    let trucks = ids.iter().map(|id| Truck::new(id.as_str(), config.battery_kwh)).collect();
    let mut inst = FleetInstance::empty(grid, trucks, zones, ChargerType::default_catalog());
    let mut distance = Vec::with_capacity(ids.len());
    for (i, (parking, pp, rho, km)) in per_truck.into_iter().enumerate() {
        inst.parking[i] = parking;
        inst.pp[i] = pp;
        inst.rho[i] = rho;
        distance.push(km);
    }
    inst.distance = Some(distance);
    inst.validate()?;
    Ok(IngestOutput {
        instance: inst,
        ranking,
        stops: all.len(),
        origin,
    })
}

/// Activity parameters of the synthetic site.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceProfile {
    pub zones: usize,
    /// Radius of the ring of zone sites, metres.
    pub site_radius: f64,
    pub daily_miles: f64,
    /// Driving speed range, m/s.
    pub speed: (f64, f64),
    /// Dwell range at zones, minutes.
    pub dwell: (f64, f64),
    /// Share of trips ending at a random off-zone spot.
    pub off_zone_share: f64,
    /// Sampling period, seconds.
    pub period: i64,
    /// Shift start and end, hours.
    pub shift: (f64, f64),
    /// Epoch seconds of day 0.
    pub origin: i64,
}

impl Default for TraceProfile {
    fn default() -> Self {
        Self {
            zones: 8,
            site_radius: 5_000.0,
            daily_miles: 74.0,
            speed: (8.0, 12.0),
            dwell: (10.0, 60.0),
            off_zone_share: 0.2,
            period: 30,
            shift: (6.0, 22.0),
            // 2023-01-01T00:00:00Z
            origin: 1_672_531_200,
        }
    }
}

impl TraceProfile {
    pub fn validate(&self) -> Result<()> {
        if self.zones < 2 || !(self.daily_miles > 0.0) || !(self.speed.0 > 0.0) || self.speed.0 > self.speed.1 {
            return Err(Error::invalid("degenerate trace profile: no activity"));
        }
        if !(self.dwell.0 >= 5.0 && self.dwell.0 <= self.dwell.1) || self.period <= 0 || self.period > 60 {
            return Err(Error::invalid("trace profile dwell or sampling out of range"));
        }
        if !(self.shift.0 >= 0.0 && self.shift.0 < self.shift.1 && self.shift.1 <= 24.0) {
            return Err(Error::invalid("trace profile shift must lie within a day"));
        }
        Ok(())
    }

    /// Zone site centres, placed on a ring and snapped to cell centres.
    pub fn sites(&self) -> Vec<(f64, f64)> {
        (0..self.zones)
            .map(|z| {
                let a = 2.0 * PI * z as f64 / self.zones as f64;
                let e = (self.site_radius * a.cos() / 100.0).floor() * 100.0 + 50.0 + 10_000.0;
                let n = (self.site_radius * a.sin() / 100.0).floor() * 100.0 + 50.0 + 10_000.0;
                (e, n)
            })
            .collect()
    }
}

fn dwell_points(out: &mut Vec<GpsPoint>, rng: &mut ChaCha8Rng, at: (f64, f64), from: i64, to: i64, period: i64) {
    let mut t = from;
    while t < to {
        out.push(GpsPoint {
            timestamp: t,
            easting: at.0 + rng.gen_range(-2.0..2.0),
            northing: at.1 + rng.gen_range(-2.0..2.0),
            speed: 0.0,
        });
        t += period;
    }
}

fn drive_points(out: &mut Vec<GpsPoint>, from: (f64, f64), to: (f64, f64), start: i64, speed: f64, period: i64) -> i64 {
    let d = (to.0 - from.0).hypot(to.1 - from.1);
    let secs = (d / speed).ceil().max(1.0) as i64;
    let mut t = start;
    while t < start + secs {
        let f = (t - start) as f64 / secs as f64;
        out.push(GpsPoint {
            timestamp: t,
            easting: from.0 + f * (to.0 - from.0),
            northing: from.1 + f * (to.1 - from.1),
            speed,
        });
        t += period;
    }
    start + secs
}

/// Seeded GPS streams for a synthetic site. Each truck sleeps at a home zone
/// and drives between zones (and occasional off-zone spots) during its shift
/// until its daily distance is reached.
pub fn synthesize_fleet(seed: u64, trucks: usize, days: usize, profile: &TraceProfile) -> Result<GpsFleet> {
    if trucks == 0 || days == 0 {
        return Err(Error::invalid("synthetic fleet needs at least one truck and one day"));
    }
    profile.validate()?;
    let sites = profile.sites();
    let streams: Vec<(String, Vec<GpsPoint>)> = (0..trucks)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let home = rng.gen_range(0..sites.len());
            let mut pts = Vec::new();
            let mut t = profile.origin;
            let mut here = sites[home];
            for d in 0..days {
                let day0 = profile.origin + d as i64 * DAY_SECONDS;
                let shift_start = day0 + (profile.shift.0 * 3600.0) as i64 + rng.gen_range(0..1800);
                let shift_end = day0 + (profile.shift.1 * 3600.0) as i64;
                dwell_points(&mut pts, &mut rng, here, t, shift_start, 60);
                t = t.max(shift_start);
                let target = profile.daily_miles * METERS_PER_MILE * rng.gen_range(0.9..1.1);
                let mut driven = 0.0;
                while driven < target && t < shift_end - 3600 {
                    let next = if rng.gen_bool(profile.off_zone_share.clamp(0.0, 1.0)) {
                        let a = rng.gen_range(0.0..2.0 * PI);
                        let r = rng.gen_range(0.3..1.2) * profile.site_radius;
                        (10_000.0 + r * a.cos(), 10_000.0 + r * a.sin())
                    } else {
                        let mut z = rng.gen_range(0..sites.len());
                        if sites[z] == here {
                            z = (z + 1) % sites.len();
                        }
                        sites[z]
                    };
                    let speed = rng.gen_range(profile.speed.0..=profile.speed.1);
                    t = drive_points(&mut pts, here, next, t, speed, profile.period);
                    driven += (next.0 - here.0).hypot(next.1 - here.1);
                    here = next;
                    let dwell = (rng.gen_range(profile.dwell.0..=profile.dwell.1) * 60.0) as i64;
                    dwell_points(&mut pts, &mut rng, here, t, t + dwell, profile.period);
                    t += dwell;
                }
                let speed = rng.gen_range(profile.speed.0..=profile.speed.1);
                t = drive_points(&mut pts, here, sites[home], t, speed, profile.period);
                here = sites[home];
            }
            let end = profile.origin + days as i64 * DAY_SECONDS;
            let mut rng_tail = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
            rng_tail.set_stream(i as u64);
            dwell_points(&mut pts, &mut rng_tail, here, t, end, 60);
            (format!("T{i:03}"), pts)
        })
        .collect();
    Ok(streams.into_iter().collect())
}

/// Hourly temperatures (°F) with seasonal and daily cycles.
pub fn synthetic_temperatures(hours: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..hours)
        .map(|h| {
            let day = h as f64 / 24.0;
            let seasonal = 25.0 * (2.0 * PI * (day - 110.0) / 365.0).sin();
            let daily = 10.0 * (2.0 * PI * ((h % 24) as f64 - 9.0) / 24.0).sin();
            ((65.0 + seasonal + daily + rng.gen_range(-3.0..3.0)) * 100.0).round() / 100.0
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn still(truck_secs: &[(i64, f64, f64)]) -> Vec<GpsPoint> {
        truck_secs
            .iter()
            .map(|&(t, e, n)| GpsPoint {
                timestamp: t,
                easting: e,
                northing: n,
                speed: 0.0,
            })
            .collect()
    }

    #[test]
    fn six_minutes_within_forty_metres_is_one_stop() {
        let pts: Vec<(i64, f64, f64)> = (0..=12).map(|s| (s * 30, 1010.0 + (s % 3) as f64 * 13.0, 2020.0)).collect();
        let stops = detect_stops("t", &still(&pts), 100.0, 50.0, 5.0).unwrap();
        assert_eq!(stops.len(), 1);
        assert_eq!(stops[0].duration, 6.0);
        assert_eq!(stops[0].cell, (20, 10));
    }

    #[test]
    fn continuous_movement_has_no_stops() {
        let pts: Vec<(i64, f64, f64)> = (0..200).map(|s| (s * 30, s as f64 * 250.0, 0.0)).collect();
        assert!(detect_stops("t", &still(&pts), 100.0, 50.0, 5.0).unwrap().is_empty());
    }

    #[test]
    fn unsorted_streams_are_rejected() {
        let pts = still(&[(0, 0.0, 0.0), (30, 0.0, 0.0), (30, 0.0, 0.0)]);
        assert!(matches!(detect_stops("t", &pts, 100.0, 50.0, 5.0), Err(Error::UnsortedStream { .. })));
    }

    #[test]
    fn rank_ties_use_stopped_time() {
        let ev = |cell: Cell, duration: f64| StopEvent {
            truck: "t".into(),
            cell,
            start: 0,
            end: 0,
            duration,
        };
        let stops = vec![ev((0, 0), 5.0), ev((0, 0), 5.0), ev((1, 1), 10.0), ev((1, 1), 6.0), ev((2, 2), 50.0)];
        let r = rank_zones(&stops, 2).unwrap();
        assert_eq!(r.zones.iter().map(|z| z.cell).collect::<Vec<_>>(), vec![(1, 1), (0, 0)]);
        let r = rank_zones(&stops, 5).unwrap();
        assert!(r.short);
        assert_eq!(r.zones.len(), 3);
    }

    #[test]
    fn window_arithmetic() {
        let grid = TimeGrid::half_hourly(1);
        let ev = |start_min: i64, end_min: i64| StopEvent {
            truck: "t".into(),
            cell: (3, 3),
            start: start_min * 60,
            end: end_min * 60,
            duration: (end_min - start_min) as f64,
        };
        // 10:07 to 10:29
        let (parking, pp) = extract_windows(&[ev(607, 629)], &[(3, 3)], &grid, 0);
        assert_eq!(parking[20], Some(0));
        assert!((pp[20] - 22.0 / 30.0).abs() < 1e-12);
        let (_, pp) = extract_windows(&[ev(590, 640)], &[(3, 3)], &grid, 0);
        assert_eq!(pp[20], 1.0);
        let (parking, _) = extract_windows(&[ev(602, 606)], &[(3, 3)], &grid, 0);
        assert_eq!(parking[20], None);
    }

    #[test]
    fn energy_division() {
        let grid = TimeGrid::half_hourly(1);
        let mut model = FuelEconomyModel::with_temperatures(vec![70.0; 24]);
        // flat 3.3 mi/kWh
        model.a2 = 0.0;
        model.a1 = 0.0;
        model.a0 = 3.3;
        let pts = still(&[(0, 0.0, 0.0), (600, 10.0 * METERS_PER_MILE, 0.0)]);
        let (rho, km) = compute_energy(&pts, &model, &grid, &[], 100.0, 0).unwrap();
        assert!((rho[0] - 10.0 / 3.3).abs() < 1e-9);
        assert!((km[0] - 16.09344).abs() < 1e-9);
        let pts = still(&[(0, 5.0, 5.0), (600, 5.0, 5.0)]);
        let (rho, _) = compute_energy(&pts, &model, &grid, &[], 100.0, 0).unwrap();
        assert!(rho.iter().all(|&r| r == 0.0));
        model.a0 = -1.0;
        assert!(matches!(
            compute_energy(&pts, &model, &grid, &[], 100.0, 0),
            Err(Error::NonPositiveEconomy { .. })
        ));
    }

    #[test]
    fn default_economy_band() {
        let m = FuelEconomyModel::with_temperatures(vec![]);
        assert!((m.economy(70.0) - 3.4).abs() < 1e-12);
        assert!((m.economy(20.0) - 3.0).abs() < 1e-12);
        assert!((m.economy(120.0) - 3.0).abs() < 1e-12);
        // 73.9 mi/day at 3.0 to 3.4 mi/kWh
        assert!((73.9_f64 / 3.3 - 22.39).abs() < 0.01 && (73.9_f64 / 3.0 - 24.63).abs() < 0.01);
    }

    #[test]
    fn resampling_fills_gaps() {
        let pts = still(&[(0, 0.0, 0.0), (180, 90.0, 0.0)]);
        let r = resample(&pts, 60);
        assert_eq!(r.iter().map(|p| p.timestamp).collect::<Vec<_>>(), vec![0, 60, 120, 180]);
        assert_eq!(r[1].easting, 30.0);
    }

    #[test]
    fn synthetic_streams_are_deterministic() {
        let p = TraceProfile::default();
        let a = synthesize_fleet(7, 2, 2, &p).unwrap();
        assert_eq!(a, synthesize_fleet(7, 2, 2, &p).unwrap());
        assert!(synthesize_fleet(7, 0, 2, &p).is_err());
        for pts in a.values() {
            check_sorted("t", pts).unwrap();
        }
    }
}
