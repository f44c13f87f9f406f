//! Shared domain vocabulary: time grid, chargers, trucks, zones and the
//! time-gridded [`FleetInstance`] consumed by every other module.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Lower clamp of the effective parking duration, as a fraction of a slot.
pub const PP_MIN: f64 = 5.0 / 30.0;
/// Upper clamp of the effective parking duration.
pub const PP_MAX: f64 = 1.0;
/// SoC below which drivers get range anxiety.
pub const DEFAULT_ANXIETY_THRESHOLD: f64 = 0.30;
/// Threshold tolerance used by the low-SoC indicator rows.
pub const DEFAULT_EPSILON: f64 = 1e-6;

/// Discretisation of the planning horizon into days of equal-length slots.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub days: usize,
    pub slots_per_day: usize,
    pub slot_minutes: u32,
}

/// A (day, slot) coordinate on a [`TimeGrid`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SlotRef {
    pub day: usize,
    pub slot: usize,
}

impl SlotRef {
    pub fn new(day: usize, slot: usize) -> Self {
        Self { day, slot }
    }
}

impl Default for TimeGrid {
    fn default() -> Self {
        Self::half_hourly(1)
    }
}

impl TimeGrid {
    pub fn new(days: usize, slots_per_day: usize, slot_minutes: u32) -> Result<Self> {
        let grid = Self {
            days,
            slots_per_day,
            slot_minutes,
        };
        grid.validate()?;
        Ok(grid)
    }

    /// 48 half-hour slots per day.
    pub fn half_hourly(days: usize) -> Self {
        Self {
            days,
            slots_per_day: 48,
            slot_minutes: 30,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.slot_minutes == 0 {
            return Err(Error::invalid("slot_minutes must be positive"));
        }
        if self.days == 0 {
            return Err(Error::invalid("a time grid needs at least one day"));
        }
        if self.slots_per_day == 0 {
            return Err(Error::invalid("a time grid needs at least one slot per day"));
        }
        Ok(())
    }

    /// Total number of slots in the horizon.
    pub fn horizon(&self) -> usize {
        self.days * self.slots_per_day
    }

    /// Slot length in hours (Δt).
    pub fn slot_hours(&self) -> f64 {
        f64::from(self.slot_minutes) / 60.0
    }

    pub fn contains(&self, at: SlotRef) -> bool {
        at.day < self.days && at.slot < self.slots_per_day
    }

    /// Flat slot index `day * slots_per_day + slot`.
    pub fn index(&self, at: SlotRef) -> usize {
        debug_assert!(self.contains(at));
        at.day * self.slots_per_day + at.slot
    }

    pub fn slot_at(&self, index: usize) -> SlotRef {
        SlotRef {
            day: index / self.slots_per_day,
            slot: index % self.slots_per_day,
        }
    }

    /// The next slot, wrapping `(d, T-1)` to `(d+1, 0)`; `None` at the horizon end.
    pub fn successor(&self, at: SlotRef) -> Result<Option<SlotRef>> {
        if !self.contains(at) {
            return Err(Error::OutOfRange(format!(
                "slot ({}, {}) is outside a {}x{} grid",
                at.day, at.slot, self.days, self.slots_per_day
            )));
        }
        Ok(if at.slot + 1 < self.slots_per_day {
            Some(SlotRef::new(at.day, at.slot + 1))
        } else if at.day + 1 < self.days {
            Some(SlotRef::new(at.day + 1, 0))
        } else {
            None
        })
    }

    /// Hour of day (0-based) in which a slot starts.
    pub fn hour_of_day(&self, slot: usize) -> usize {
        (slot * self.slot_minutes as usize) / 60
    }

    pub fn with_days(&self, days: usize) -> Self {
        Self { days, ..*self }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChargerKind {
    Slow = 0,
    Fast = 1,
}

impl ChargerKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ChargerKind::Slow => "slow",
            ChargerKind::Fast => "fast",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "slow" | "0" => Ok(ChargerKind::Slow),
            "fast" | "1" => Ok(ChargerKind::Fast),
            other => Err(Error::invalid(format!("unknown charger kind `{other}`"))),
        }
    }
}

/// One entry of the charger catalog.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChargerType {
    pub kind: ChargerKind,
    /// Capital plus installation cost per charger, in dollars.
    pub capital_cost: f64,
    pub rated_power_kw: f64,
    pub efficiency: f64,
    pub soc_floor: f64,
    /// SoC above which this charger may not be used or charge to.
    pub soc_ceiling: f64,
}

impl ChargerType {
    /// Level-2 AC charger: $1,500, 11.2 kW, 90 %, 10–100 % SoC.
    pub fn slow() -> Self {
        Self {
            kind: ChargerKind::Slow,
            capital_cost: 1_500.0,
            rated_power_kw: 11.2,
            efficiency: 0.90,
            soc_floor: 0.10,
            soc_ceiling: 1.00,
        }
    }

    /// DC fast charger: $38,000, 150 kW, 95 %, 10–80 % SoC.
    pub fn fast() -> Self {
        Self {
            kind: ChargerKind::Fast,
            capital_cost: 38_000.0,
            rated_power_kw: 150.0,
            efficiency: 0.95,
            soc_floor: 0.10,
            soc_ceiling: 0.80,
        }
    }

    pub fn default_catalog() -> Vec<ChargerType> {
        vec![Self::slow(), Self::fast()]
    }

    /// Battery-side energy deliverable in one slot at full effective duration.
    pub fn slot_energy(&self, slot_hours: f64) -> f64 {
        self.efficiency * self.rated_power_kw * slot_hours
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.efficiency > 0.0 && self.efficiency <= 1.0) {
            return Err(Error::invalid(format!(
                "{} charger efficiency {} not in (0, 1]",
                self.kind.as_str(),
                self.efficiency
            )));
        }
        if !(self.soc_floor < self.soc_ceiling && self.soc_ceiling <= 1.0) {
            return Err(Error::invalid(format!(
                "{} charger SoC range [{}, {}] is invalid",
                self.kind.as_str(),
                self.soc_floor,
                self.soc_ceiling
            )));
        }
        if !(self.rated_power_kw > 0.0) {
            return Err(Error::invalid("charger power must be positive"));
        }
        if !(self.capital_cost >= 0.0) {
            return Err(Error::invalid("charger cost must be non-negative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Truck {
    pub name: String,
    pub battery_kwh: f64,
}

impl Truck {
    pub fn new(name: impl Into<String>, battery_kwh: f64) -> Self {
        Self {
            name: name.into(),
            battery_kwh,
        }
    }
}

/// Grid cell `(row, col)` of the stop-detection raster.
pub type Cell = (i64, i64);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Zone {
    pub name: String,
    /// Overnight zone: waiting there is not capped.
    pub is_special: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cell: Option<Cell>,
}

impl Zone {
    pub fn new(name: impl Into<String>, is_special: bool) -> Self {
        Self {
            name: name.into(),
            is_special,
            cell: None,
        }
    }
}

/// A maximal run of consecutive parking slots in one zone. Runs may cross
/// day boundaries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Stretch {
    pub zone: usize,
    /// Flat index of the first slot.
    pub start: usize,
    pub len: usize,
}

impl Stretch {
    pub fn end(&self) -> usize {
        self.start + self.len
    }

    pub fn slots(&self) -> std::ops::Range<usize> {
        self.start..self.end()
    }
}

/// Time-gridded problem data. All per-slot tables are dense, indexed
/// `[truck][grid.index(slot)]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FleetInstance {
    pub grid: TimeGrid,
    pub trucks: Vec<Truck>,
    pub zones: Vec<Zone>,
    pub chargers: Vec<ChargerType>,
    /// Zone occupied by the truck during the slot, if parked.
    pub parking: Vec<Vec<Option<usize>>>,
    /// Effective parking duration on parking slots, 0 elsewhere.
    pub pp: Vec<Vec<f64>>,
    /// Energy consumed while driving during the slot, kWh.
    pub rho: Vec<Vec<f64>>,
    /// Optional driven distance per slot, used only for day scoring.
    pub distance: Option<Vec<Vec<f64>>>,
    pub soc_min: f64,
    pub soc_max: f64,
    pub anxiety_threshold: f64,
    pub epsilon: f64,
}

impl FleetInstance {
    /// An instance with no parking and no consumption.
    pub fn empty(grid: TimeGrid, trucks: Vec<Truck>, zones: Vec<Zone>, chargers: Vec<ChargerType>) -> Self {
        let h = grid.horizon();
        let n = trucks.len();
        Self {
            grid,
            parking: vec![vec![None; h]; n],
            pp: vec![vec![0.0; h]; n],
            rho: vec![vec![0.0; h]; n],
            distance: None,
            trucks,
            zones,
            chargers,
            soc_min: 0.10,
            soc_max: 1.00,
            anxiety_threshold: DEFAULT_ANXIETY_THRESHOLD,
            epsilon: DEFAULT_EPSILON,
        }
    }

    pub fn num_trucks(&self) -> usize {
        self.trucks.len()
    }

    pub fn horizon(&self) -> usize {
        self.grid.horizon()
    }

    pub fn is_parked(&self, truck: usize, index: usize) -> bool {
        self.parking[truck][index].is_some()
    }

    pub fn zone_at(&self, truck: usize, index: usize) -> Option<usize> {
        self.parking[truck][index]
    }

    pub fn is_special_slot(&self, truck: usize, index: usize) -> bool {
        self.parking[truck][index].is_some_and(|z| self.zones[z].is_special)
    }

    /// Marks a parking slot.
    pub fn park(&mut self, truck: usize, at: SlotRef, zone: usize, pp: f64) {
        let k = self.grid.index(at);
        self.parking[truck][k] = Some(zone);
        self.pp[truck][k] = pp;
    }

    pub fn set_rho(&mut self, truck: usize, at: SlotRef, kwh: f64) {
        let k = self.grid.index(at);
        self.rho[truck][k] = kwh;
    }

    /// Index of the first charger of the given kind in the catalog.
    pub fn charger_index(&self, kind: ChargerKind) -> Option<usize> {
        self.chargers.iter().position(|c| c.kind == kind)
    }

    /// Maximal same-zone contiguous runs of parking slots for one truck.
    pub fn parked_stretches(&self, truck: usize) -> Vec<Stretch> {
        let row = &self.parking[truck];
        let mut out: Vec<Stretch> = Vec::new();
        let mut current: Option<Stretch> = None;
        for (k, zone) in row.iter().enumerate() {
            match (*zone, current.as_mut()) {
                (Some(z), Some(run)) if run.zone == z && run.end() == k => run.len += 1,
                (Some(z), _) => {
                    if let Some(run) = current.take() {
                        out.push(run);
                    }
                    current = Some(Stretch {
                        zone: z,
                        start: k,
                        len: 1,
                    });
                }
                (None, _) => {
                    if let Some(run) = current.take() {
                        out.push(run);
                    }
                }
            }
        }
        out.extend(current);
        out
    }

    /// Whether `index` and `index + 1` are both parked in the same zone.
    pub fn continues_stretch(&self, truck: usize, index: usize) -> bool {
        let row = &self.parking[truck];
        index + 1 < row.len() && row[index].is_some() && row[index] == row[index + 1]
    }

    pub fn total_rho(&self, truck: usize) -> f64 {
        self.rho[truck].iter().sum()
    }

    pub fn parking_slot_count(&self, truck: usize) -> usize {
        self.parking[truck].iter().filter(|z| z.is_some()).count()
    }

    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        if self.zones.is_empty() {
            return Err(Error::invalid("an instance needs at least one zone"));
        }
        if self.chargers.is_empty() {
            return Err(Error::invalid("the charger catalog is empty"));
        }
        for c in &self.chargers {
            c.validate()?;
        }
        let mut kinds: Vec<_> = self.chargers.iter().map(|c| c.kind).collect();
        kinds.sort();
        kinds.dedup();
        if kinds.len() != self.chargers.len() {
            return Err(Error::invalid("charger kinds must be unique in the catalog"));
        }
        if !(self.soc_min < self.anxiety_threshold && self.anxiety_threshold < 0.8 && 0.8 <= self.soc_max && self.soc_max <= 1.0) {
            return Err(Error::invalid(format!(
                "SoC bounds must satisfy soc_min < anxiety < 0.8 <= soc_max <= 1, got {} / {} / {}",
                self.soc_min, self.anxiety_threshold, self.soc_max
            )));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::invalid("epsilon must be positive"));
        }
        let h = self.horizon();
        let n = self.trucks.len();
        let shapes_ok = self.parking.len() == n
            && self.pp.len() == n
            && self.rho.len() == n
            && self.parking.iter().all(|r| r.len() == h)
            && self.pp.iter().all(|r| r.len() == h)
            && self.rho.iter().all(|r| r.len() == h);
        if !shapes_ok {
            return Err(Error::invalid("per-slot tables do not match trucks x horizon"));
        }
        if let Some(dist) = &self.distance {
            if dist.len() != n || dist.iter().any(|r| r.len() != h) {
                return Err(Error::invalid("distance table does not match trucks x horizon"));
            }
        }
        for (i, truck) in self.trucks.iter().enumerate() {
            if !(truck.battery_kwh > 0.0) {
                return Err(Error::invalid(format!("truck {i} has non-positive battery")));
            }
            for k in 0..h {
                let pp = self.pp[i][k];
                match self.parking[i][k] {
                    Some(z) => {
                        if z >= self.zones.len() {
                            return Err(Error::invalid(format!("truck {i} slot {k} refers to unknown zone {z}")));
                        }
                        if !(PP_MIN - 1e-9..=PP_MAX + 1e-9).contains(&pp) {
                            return Err(Error::invalid(format!(
                                "truck {i} slot {k}: effective duration {pp} outside [5/30, 1]"
                            )));
                        }
                    }
                    None => {
                        if pp != 0.0 {
                            return Err(Error::invalid(format!(
                                "truck {i} slot {k}: effective duration set on a non-parking slot"
                            )));
                        }
                    }
                }
                let rho = self.rho[i][k];
                if !(rho >= 0.0) || !rho.is_finite() {
                    return Err(Error::invalid(format!("truck {i} slot {k}: energy {rho} must be >= 0")));
                }
            }
        }
        Ok(())
    }

    /// Sub-instance over the given trucks, in the given order.
    pub fn select_trucks(&self, keep: &[usize]) -> FleetInstance {
        let pick = |t: &Vec<Vec<f64>>| keep.iter().map(|&i| t[i].clone()).collect::<Vec<_>>();
        FleetInstance {
            grid: self.grid,
            trucks: keep.iter().map(|&i| self.trucks[i].clone()).collect(),
            zones: self.zones.clone(),
            chargers: self.chargers.clone(),
            parking: keep.iter().map(|&i| self.parking[i].clone()).collect(),
            pp: pick(&self.pp),
            rho: pick(&self.rho),
            distance: self.distance.as_ref().map(pick),
            soc_min: self.soc_min,
            soc_max: self.soc_max,
            anxiety_threshold: self.anxiety_threshold,
            epsilon: self.epsilon,
        }
    }

    /// Sub-instance over the given days, concatenated in the given order.
    pub fn select_days(&self, days: &[usize]) -> FleetInstance {
        let t = self.grid.slots_per_day;
        let slice_rows = |rows: &Vec<Vec<f64>>| {
            rows.iter()
                .map(|r| days.iter().flat_map(|&d| r[d * t..(d + 1) * t].iter().copied()).collect())
                .collect::<Vec<Vec<f64>>>()
        };
        FleetInstance {
            grid: self.grid.with_days(days.len()),
            trucks: self.trucks.clone(),
            zones: self.zones.clone(),
            chargers: self.chargers.clone(),
            parking: self
                .parking
                .iter()
                .map(|r| days.iter().flat_map(|&d| r[d * t..(d + 1) * t].iter().copied()).collect())
                .collect(),
            pp: slice_rows(&self.pp),
            rho: slice_rows(&self.rho),
            distance: self.distance.as_ref().map(slice_rows),
            soc_min: self.soc_min,
            soc_max: self.soc_max,
            anxiety_threshold: self.anxiety_threshold,
            epsilon: self.epsilon,
        }
    }

    pub fn day_range(&self, range: std::ops::Range<usize>) -> FleetInstance {
        let days: Vec<usize> = range.collect();
        self.select_days(&days)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_truck(grid: TimeGrid) -> FleetInstance {
        FleetInstance::empty(
            grid,
            vec![Truck::new("t0", 100.0)],
            vec![Zone::new("Z1", false), Zone::new("Z2", false)],
            ChargerType::default_catalog(),
        )
    }

    #[test]
    fn successor_steps_and_wraps() {
        let grid = TimeGrid::half_hourly(2);
        assert_eq!(grid.successor(SlotRef::new(0, 46)).unwrap(), Some(SlotRef::new(0, 47)));
        assert_eq!(grid.successor(SlotRef::new(0, 47)).unwrap(), Some(SlotRef::new(1, 0)));
        assert_eq!(grid.successor(SlotRef::new(1, 47)).unwrap(), None);
        assert!(grid.successor(SlotRef::new(2, 0)).is_err());
        assert!(grid.successor(SlotRef::new(0, 48)).is_err());
    }

    #[test]
    fn grid_rejects_degenerate() {
        assert!(TimeGrid::new(0, 48, 30).is_err());
        assert!(TimeGrid::new(1, 48, 0).is_err());
        assert_eq!(TimeGrid::half_hourly(3).slot_hours(), 0.5);
        assert_eq!(TimeGrid::half_hourly(1).hour_of_day(47), 23);
    }

    #[test]
    fn stretches_split_on_zone_change() {
        let mut inst = one_truck(TimeGrid::half_hourly(1));
        inst.park(0, SlotRef::new(0, 1), 0, 1.0);
        inst.park(0, SlotRef::new(0, 2), 0, 1.0);
        inst.park(0, SlotRef::new(0, 3), 1, 1.0);
        let runs = inst.parked_stretches(0);
        assert_eq!(
            runs,
            vec![
                Stretch { zone: 0, start: 1, len: 2 },
                Stretch { zone: 1, start: 3, len: 1 }
            ]
        );
    }

    #[test]
    fn stretches_cross_day_boundary() {
        let mut inst = one_truck(TimeGrid::half_hourly(2));
        inst.park(0, SlotRef::new(0, 47), 0, 1.0);
        inst.park(0, SlotRef::new(1, 0), 0, 1.0);
        assert_eq!(inst.parked_stretches(0), vec![Stretch { zone: 0, start: 47, len: 2 }]);
    }

    #[test]
    fn empty_parking_has_no_stretches() {
        let inst = one_truck(TimeGrid::half_hourly(1));
        assert!(inst.parked_stretches(0).is_empty());
        inst.validate().unwrap();
    }

    #[test]
    fn validate_catches_bad_pp_and_overlap_rules() {
        let mut inst = one_truck(TimeGrid::half_hourly(1));
        inst.park(0, SlotRef::new(0, 0), 0, 0.1);
        assert!(inst.validate().is_err());
        inst.pp[0][0] = 0.5;
        inst.validate().unwrap();
        inst.pp[0][5] = 0.5;
        assert!(inst.validate().is_err());
    }

    #[test]
    fn select_days_concatenates() {
        let mut inst = one_truck(TimeGrid::half_hourly(3));
        inst.park(0, SlotRef::new(2, 4), 1, 0.5);
        inst.set_rho(0, SlotRef::new(0, 1), 3.0);
        let sub = inst.select_days(&[0, 2]);
        assert_eq!(sub.grid.days, 2);
        assert_eq!(sub.zone_at(0, 48 + 4), Some(1));
        assert_eq!(sub.rho[0][1], 3.0);
        sub.validate().unwrap();
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn stretches_partition_parking(cells in proptest::collection::vec(0u8..3, 1..96)) {
                let grid = TimeGrid::half_hourly(2);
                let mut inst = one_truck(grid);
                for (k, c) in cells.iter().enumerate().take(grid.horizon()) {
                    if *c > 0 {
                        inst.park(0, grid.slot_at(k), (*c - 1) as usize, 1.0);
                    }
                }
                let runs = inst.parked_stretches(0);
                let mut covered = vec![false; grid.horizon()];
                for r in &runs {
                    for k in r.slots() {
                        prop_assert!(!covered[k]);
                        covered[k] = true;
                        prop_assert_eq!(inst.parking[0][k], Some(r.zone));
                    }
                    // maximal on both ends
                    if r.start > 0 {
                        prop_assert_ne!(inst.parking[0][r.start - 1], Some(r.zone));
                    }
                    if r.end() < grid.horizon() {
                        prop_assert_ne!(inst.parking[0][r.end()], Some(r.zone));
                    }
                }
                for k in 0..grid.horizon() {
                    prop_assert_eq!(covered[k], inst.parking[0][k].is_some());
                }
            }
        }
    }
}
