//! The planning MILP: charger counts per zone and type, per-slot charging,
//! abandonment, waiting time, SoC, charged energy and low-SoC shortfall.
//!
//! Slots are addressed by flat index `k = day * slots_per_day + slot`.
//! `y`, `a`, `w` and `p` exist only on parking slots; elsewhere they are
//! implicitly zero. `b[i][k]` is the SoC at the end of slot `k`.

use std::borrow::Cow;
use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::installation::Installation;
use crate::lp::{LinearModel, RowTag, Sense, VarId, VarKind};
use crate::types::{ChargerKind, FleetInstance};
use crate::uncertainty::{PpSample, UncertaintyMoments};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum CaseProfile {
    #[default]
    Benchmark,
    /// Effective duration is the whole slot.
    FullParking,
    /// No zone allows overnight waiting.
    NoOvernight,
    /// No extra waiting slot at low SoC.
    NoAnxiety,
}

impl CaseProfile {
    pub const ALL: [CaseProfile; 4] = [
        CaseProfile::Benchmark,
        CaseProfile::FullParking,
        CaseProfile::NoOvernight,
        CaseProfile::NoAnxiety,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            CaseProfile::Benchmark => "benchmark",
            CaseProfile::FullParking => "full-parking",
            CaseProfile::NoOvernight => "no-overnight",
            CaseProfile::NoAnxiety => "no-anxiety",
        }
    }
}

impl FromStr for CaseProfile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_lowercase().replace('_', "-");
        CaseProfile::ALL
            .into_iter()
            .find(|c| c.as_str() == norm)
            .ok_or_else(|| Error::invalid(format!("unknown case `{s}`")))
    }
}

impl fmt::Display for CaseProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Instance as seen under a case profile: full-parking sets every effective
/// duration to 1, no-overnight clears the special flags. Other cases leave
/// the data untouched.
pub fn apply_case(inst: &FleetInstance, case: CaseProfile) -> FleetInstance {
    let mut out = inst.clone();
    match case {
        CaseProfile::FullParking => {
            for (row, park) in out.pp.iter_mut().zip(&inst.parking) {
                for (pp, z) in row.iter_mut().zip(park) {
                    if z.is_some() {
                        *pp = 1.0;
                    }
                }
            }
        }
        CaseProfile::NoOvernight => {
            for z in out.zones.iter_mut() {
                z.is_special = false;
            }
        }
        CaseProfile::Benchmark | CaseProfile::NoAnxiety => {}
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Penalties {
    pub low_soc: f64,
    pub charging: f64,
}

impl Default for Penalties {
    fn default() -> Self {
        Self {
            low_soc: 1.0,
            charging: 1.0,
        }
    }
}

/// Where the power-bound coefficients come from.
#[derive(Debug, Clone, Copy)]
pub enum PowerSource<'a> {
    /// Instance effective durations.
    Deterministic,
    /// Lower edge of the decision-dependent box.
    Robust(&'a UncertaintyMoments),
    /// A drawn realisation, one duration per charger type.
    Sampled(&'a PpSample),
}

impl<'a> PowerSource<'a> {
    /// Robust source from optional moments.
    pub fn robust(moments: Option<&'a UncertaintyMoments>) -> Result<Self> {
        moments.map(PowerSource::Robust).ok_or(Error::MissingMoments)
    }

    pub fn mode(&self) -> ModelMode {
        match self {
            PowerSource::Deterministic => ModelMode::Deterministic,
            PowerSource::Robust(_) => ModelMode::Robust,
            PowerSource::Sampled(_) => ModelMode::Sampled,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelMode {
    Deterministic,
    Robust,
    Sampled,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ModelConfig {
    pub penalties: Penalties,
    pub case: CaseProfile,
    /// Lower bounds on charger counts.
    pub install_lower: Option<Installation>,
    /// Upper bounds on charger counts (equal to the lower bounds to fix them).
    pub install_upper: Option<Installation>,
    /// `(truck, flat slot)` pairs where fast charging is forced.
    pub fixed_fast: BTreeSet<(usize, usize)>,
}

impl ModelConfig {
    pub fn with_case(mut self, case: CaseProfile) -> Self {
        self.case = case;
        self
    }

    pub fn fix_installation(mut self, inst: &Installation) -> Self {
        self.install_lower = Some(inst.clone());
        self.install_upper = Some(inst.clone());
        self
    }

    pub fn installation_at_least(mut self, inst: &Installation) -> Self {
        self.install_lower = Some(inst.clone());
        self.install_upper = None;
        self
    }
}

/// Applies a named case to a builder configuration.
pub fn set_case_profile(config: ModelConfig, case: &str) -> Result<ModelConfig> {
    Ok(config.with_case(case.parse()?))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BigMSet {
    pub m1: f64,
    pub m2: f64,
    pub m3: f64,
    /// Longest non-special parked stretch, hours.
    pub w_max: f64,
    /// Longest special-zone parked stretch, hours.
    pub w_max_special: f64,
}

/// Minimal big-M constants for an instance.
pub fn compute_big_m(inst: &FleetInstance) -> BigMSet {
    let theta = inst.anxiety_threshold;
    let m1 = (inst.soc_max - theta).max(theta + inst.epsilon - inst.soc_min);
    let fast_ceiling = inst
        .charger_index(ChargerKind::Fast)
        .map_or(0.8, |j| inst.chargers[j].soc_ceiling);
    let m3 = (inst.soc_max - fast_ceiling).max(0.0);
    let dt = inst.grid.slot_hours();
    let mut longest = 0usize;
    let mut longest_special = 0usize;
    let mut any = false;
    for i in 0..inst.num_trucks() {
        for s in inst.parked_stretches(i) {
            any = true;
            if inst.zones[s.zone].is_special {
                longest_special = longest_special.max(s.len);
            } else {
                longest = longest.max(s.len);
            }
        }
    }
    if !any {
        log::warn!("instance has no parking slots; W_max = 0");
    }
    let w_max = longest as f64 * dt;
    BigMSet {
        m1,
        m2: w_max,
        m3,
        w_max,
        w_max_special: longest_special as f64 * dt,
    }
}

/// Whether the two low-SoC indicator rows admit `(b, delta)` for a given M.
pub fn low_soc_rows_admit(b: f64, delta: bool, m1: f64, threshold: f64, epsilon: f64) -> bool {
    let d = if delta { 1.0 } else { 0.0 };
    let lower = b + m1 * d >= threshold + epsilon - 1e-12;
    let upper = b + m1 * d <= threshold + m1 + 1e-12;
    lower && upper
}

#[derive(Debug, Clone, PartialEq)]
pub struct SlotVars {
    /// Charging binaries by catalog position.
    pub y: Vec<VarId>,
    pub a: VarId,
    pub w: VarId,
    pub p: VarId,
    /// Low-SoC indicator, present where it limits waiting.
    pub delta: Option<VarId>,
    /// Power-bound coefficient per catalog position, kWh.
    pub coef: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct VariableCatalog {
    /// `[zone][catalog position]`.
    pub x: Vec<Vec<VarId>>,
    /// `[truck][slot]`.
    pub b: Vec<Vec<VarId>>,
    pub v: Vec<Vec<VarId>>,
    /// SoC entering the horizon, tied to the final SoC.
    pub b_init: Vec<VarId>,
    /// `[truck][slot]`, `Some` on parking slots.
    pub slots: Vec<Vec<Option<SlotVars>>>,
}

#[derive(Debug, Clone)]
pub struct PlanningModel {
    pub lp: LinearModel,
    pub catalog: VariableCatalog,
    pub big_m: BigMSet,
    pub mode: ModelMode,
    pub case: CaseProfile,
    pub penalties: Penalties,
    /// The instance after applying the case profile.
    pub instance: FleetInstance,
    pub fixed_fast: BTreeSet<(usize, usize)>,
    pub warnings: Vec<String>,
}

fn slot_name(inst: &FleetInstance, i: usize, k: usize) -> String {
    let at = inst.grid.slot_at(k);
    format!("{i}_{}_{}", at.day, at.slot)
}

/// Maximum number of trucks parked in each zone at the same slot.
pub fn max_occupancy(inst: &FleetInstance) -> Vec<u32> {
    let mut best = vec![0u32; inst.zones.len()];
    let mut count = vec![0u32; inst.zones.len()];
    for k in 0..inst.horizon() {
        count.iter_mut().for_each(|c| *c = 0);
        for i in 0..inst.num_trucks() {
            if let Some(z) = inst.parking[i][k] {
                count[z] += 1;
            }
        }
        for (b, c) in best.iter_mut().zip(&count) {
            *b = (*b).max(*c);
        }
    }
    best
}

fn power_coefficient(inst: &FleetInstance, source: &PowerSource<'_>, case: CaseProfile, i: usize, k: usize, j: usize) -> f64 {
    let full = inst.chargers[j].slot_energy(inst.grid.slot_hours());
    if case == CaseProfile::FullParking {
        return full;
    }
    match source {
        PowerSource::Deterministic => full * inst.pp[i][k],
        PowerSource::Robust(m) => m
            .coefficient_at(inst, i, k, j)
            .unwrap_or(full * inst.pp[i][k]),
        PowerSource::Sampled(s) => full * s.get(i, k, j),
    }
}

/// Assembles the MILP for an instance under a power source and config.
pub fn build_model(instance: &FleetInstance, source: PowerSource<'_>, config: &ModelConfig) -> Result<PlanningModel> {
    instance.validate()?;
    if config.penalties.low_soc < 0.0 || config.penalties.charging < 0.0 {
        return Err(Error::invalid("penalties must be non-negative"));
    }
    if let PowerSource::Robust(m) = source {
        m.validate()?;
    }
    let inst: Cow<'_, FleetInstance> = match config.case {
        CaseProfile::FullParking | CaseProfile::NoOvernight => Cow::Owned(apply_case(instance, config.case)),
        _ => Cow::Borrowed(instance),
    };
    let inst = inst.as_ref();
    let big_m = compute_big_m(inst);
    let grid = inst.grid;
    let h = grid.horizon();
    let n = inst.num_trucks();
    let nj = inst.chargers.len();
    let dt = grid.slot_hours();
    let theta = inst.anxiety_threshold;
    let anxiety = config.case != CaseProfile::NoAnxiety;
    let mut lp = LinearModel::default();
    let mut warnings = Vec::new();

    // installation
    let occupancy = max_occupancy(inst);
    let mut x = Vec::with_capacity(inst.zones.len());
    for z in 0..inst.zones.len() {
        let mut row = Vec::with_capacity(nj);
        for (j, c) in inst.chargers.iter().enumerate() {
            let lo = config.install_lower.as_ref().map_or(0, |l| l.get(z, c.kind));
            let hi = match &config.install_upper {
                Some(u) => u.get(z, c.kind),
                None => occupancy[z].max(lo),
            };
            if hi < lo {
                return Err(Error::invalid(format!(
                    "zone {z} {} bounds [{lo}, {hi}] are empty",
                    c.kind.as_str()
                )));
            }
            row.push(lp.add_var(
                format!("x_{z}_{j}"),
                VarKind::Integer,
                f64::from(lo),
                f64::from(hi),
                c.capital_cost,
            ));
        }
        x.push(row);
    }

    let mut b = Vec::with_capacity(n);
    let mut v = Vec::with_capacity(n);
    let mut b_init = Vec::with_capacity(n);
    let mut slots: Vec<Vec<Option<SlotVars>>> = Vec::with_capacity(n);
    for i in 0..n {
        if inst.parking_slot_count(i) == 0 && inst.total_rho(i) > 0.0 {
            warnings.push(format!(
                "truck {i} ({}) never parks but consumes {:.3} kWh; the model is infeasible unless it is filtered out",
                inst.trucks[i].name,
                inst.total_rho(i)
            ));
        }
        b_init.push(lp.add_var(format!("binit_{i}"), VarKind::Continuous, inst.soc_min, inst.soc_max, 0.0));
        let mut bi = Vec::with_capacity(h);
        let mut vi = Vec::with_capacity(h);
        let mut si = Vec::with_capacity(h);
        for k in 0..h {
            let s = slot_name(inst, i, k);
            bi.push(lp.add_var(format!("b_{s}"), VarKind::Continuous, inst.soc_min, inst.soc_max, 0.0));
            vi.push(lp.add_var(format!("v_{s}"), VarKind::Continuous, 0.0, f64::INFINITY, config.penalties.low_soc));
            if inst.is_parked(i, k) {
                let y = (0..nj)
                    .map(|j| lp.add_var(format!("y_{s}_{j}"), VarKind::Binary, 0.0, 1.0, config.penalties.charging))
                    .collect();
                let a = lp.add_var(format!("a_{s}"), VarKind::Binary, 0.0, 1.0, 0.0);
                let w = lp.add_var(format!("w_{s}"), VarKind::Continuous, 0.0, f64::INFINITY, 0.0);
                let p = lp.add_var(format!("p_{s}"), VarKind::Continuous, 0.0, f64::INFINITY, 0.0);
                let delta = (anxiety && !inst.is_special_slot(i, k))
                    .then(|| lp.add_var(format!("d30_{s}"), VarKind::Binary, 0.0, 1.0, 0.0));
                let coef = (0..nj).map(|j| power_coefficient(inst, &source, config.case, i, k, j)).collect();
                si.push(Some(SlotVars { y, a, w, p, delta, coef }));
            } else {
                si.push(None);
            }
        }
        b.push(bi);
        v.push(vi);
        slots.push(si);
    }

    for i in 0..n {
        let e = inst.trucks[i].battery_kwh;
        for k in 0..h {
            let s = slot_name(inst, i, k);
            // battery balance and shortfall on every slot
            let prev = if k == 0 { b_init[i] } else { b[i][k - 1] };
            let mut terms = vec![(b[i][k], e), (prev, -e)];
            if let Some(sv) = &slots[i][k] {
                terms.push((sv.p, -1.0));
            }
            lp.add_row(format!("balance_{s}"), RowTag::Balance, terms, Sense::Eq, -inst.rho[i][k]);
            lp.add_row(
                format!("shortfall_{s}"),
                RowTag::Shortfall,
                vec![(v[i][k], 1.0), (b[i][k], 1.0)],
                Sense::Ge,
                theta,
            );
            let Some(sv) = &slots[i][k] else { continue };

            let ysum: Vec<(VarId, f64)> = sv.y.iter().map(|&y| (y, 1.0)).collect();
            lp.add_row(format!("singlecharger_{s}"), RowTag::SingleCharger, ysum.clone(), Sense::Le, 1.0);
            let mut t = ysum.clone();
            t.push((sv.a, 1.0));
            lp.add_row(format!("abandonnocharge_{s}"), RowTag::AbandonNoCharge, t, Sense::Le, 1.0);

            if let Some(d) = sv.delta {
                lp.add_row(
                    format!("lowsoclo_{s}"),
                    RowTag::LowSocLower,
                    vec![(b[i][k], 1.0), (d, big_m.m1)],
                    Sense::Ge,
                    theta + inst.epsilon,
                );
                lp.add_row(
                    format!("lowsochi_{s}"),
                    RowTag::LowSocUpper,
                    vec![(b[i][k], 1.0), (d, big_m.m1)],
                    Sense::Le,
                    theta + big_m.m1,
                );
            }

            // waiting: reset at stretch start, recursion inside the stretch
            let starts = k == 0 || inst.parking[i][k - 1] != inst.parking[i][k];
            if starts {
                lp.add_row(format!("waitreset_{s}"), RowTag::WaitReset, vec![(sv.w, 1.0)], Sense::Eq, 0.0);
            }
            if inst.continues_stretch(i, k) {
                let next = slots[i][k + 1].as_ref().expect("stretch continues on a parking slot");
                let mut t = vec![(next.w, 1.0), (sv.w, -1.0)];
                t.extend(sv.y.iter().map(|&y| (y, dt)));
                lp.add_row(format!("waitrecursion_{s}"), RowTag::WaitRecursion, t, Sense::Eq, dt);
                lp.add_row(
                    format!("abandonmonotone_{s}"),
                    RowTag::AbandonMonotone,
                    vec![(sv.a, 1.0), (next.a, -1.0)],
                    Sense::Le,
                    0.0,
                );
            }
            if !inst.is_special_slot(i, k) {
                let mut t = vec![(sv.w, 1.0), (sv.a, -big_m.m2)];
                if let Some(d) = sv.delta {
                    t.push((d, -dt));
                }
                lp.add_row(format!("waitcap_{s}"), RowTag::WaitCap, t, Sense::Le, 0.0);
            }

            let mut t = vec![(sv.p, 1.0)];
            t.extend(sv.y.iter().zip(&sv.coef).map(|(&y, &c)| (y, -c)));
            lp.add_row(format!("powerbound_{s}"), RowTag::PowerBound, t, Sense::Le, 0.0);

            for (j, c) in inst.chargers.iter().enumerate() {
                let m = inst.soc_max - c.soc_ceiling;
                if m <= 0.0 {
                    continue;
                }
                let y = sv.y[j];
                lp.add_row(
                    format!("fastcapbefore_{s}_{j}"),
                    RowTag::FastCapBefore,
                    vec![(b[i][k], 1.0), (y, m)],
                    Sense::Le,
                    c.soc_ceiling + m,
                );
                if k + 1 < h {
                    lp.add_row(
                        format!("fastcapduring_{s}_{j}"),
                        RowTag::FastCapDuring,
                        vec![(b[i][k + 1], 1.0), (y, m)],
                        Sense::Le,
                        c.soc_ceiling + m,
                    );
                }
            }
        }
        lp.add_row(
            format!("cyclic_{i}"),
            RowTag::Cyclic,
            vec![(b_init[i], 1.0), (b[i][h - 1], -1.0)],
            Sense::Eq,
            0.0,
        );
    }

    // zone capacity
    for k in 0..h {
        let at = grid.slot_at(k);
        for z in 0..inst.zones.len() {
            let present: Vec<usize> = (0..n).filter(|&i| inst.parking[i][k] == Some(z)).collect();
            if present.is_empty() {
                continue;
            }
            for j in 0..nj {
                let mut t: Vec<(VarId, f64)> = present
                    .iter()
                    .map(|&i| (slots[i][k].as_ref().expect("parked").y[j], 1.0))
                    .collect();
                t.push((x[z][j], -1.0));
                lp.add_row(
                    format!("capacity_{z}_{j}_{}_{}", at.day, at.slot),
                    RowTag::Capacity,
                    t,
                    Sense::Le,
                    0.0,
                );
            }
        }
    }

    for w in &warnings {
        log::warn!("{w}");
    }
    let mut model = PlanningModel {
        lp,
        catalog: VariableCatalog {
            x,
            b,
            v,
            b_init,
            slots,
        },
        big_m,
        mode: source.mode(),
        case: config.case,
        penalties: config.penalties,
        instance: inst.clone(),
        fixed_fast: BTreeSet::new(),
        warnings,
    };
    let fixed: Vec<(usize, usize)> = config.fixed_fast.iter().copied().collect();
    fix_fast_charging(&mut model, &fixed)?;
    Ok(model)
}

/// Forces fast charging at the given `(truck, flat slot)` pairs.
pub fn fix_fast_charging(model: &mut PlanningModel, slots: &[(usize, usize)]) -> Result<()> {
    if slots.is_empty() {
        return Ok(());
    }
    let j = model
        .instance
        .charger_index(ChargerKind::Fast)
        .ok_or_else(|| Error::invalid("the catalog has no fast charger"))?;
    for &(i, k) in slots {
        let sv = model
            .catalog
            .slots
            .get(i)
            .and_then(|r| r.get(k))
            .and_then(|s| s.as_ref())
            .ok_or(Error::FixOutsideWindow { truck: i, slot: k })?;
        model.lp.vars[sv.y[j].0].lb = 1.0;
        model.fixed_fast.insert((i, k));
    }
    Ok(())
}

impl PlanningModel {
    pub fn slot(&self, truck: usize, index: usize) -> Option<&SlotVars> {
        self.catalog.slots[truck][index].as_ref()
    }

    pub fn write_lp(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.lp
            .write_lp(std::io::BufWriter::new(f))
            .map_err(|e| Error::io(path, e))
    }

    /// Objective parts `(installation, low-SoC penalty, charging penalty)`.
    pub fn objective_parts(&self, values: &[f64]) -> (f64, f64, f64) {
        let inst = &self.instance;
        let mut install = 0.0;
        for row in &self.catalog.x {
            for (j, &x) in row.iter().enumerate() {
                install += inst.chargers[j].capital_cost * values[x.0];
            }
        }
        let low: f64 = self.catalog.v.iter().flatten().map(|v| values[v.0]).sum::<f64>() * self.penalties.low_soc;
        let charging: f64 = self
            .catalog
            .slots
            .iter()
            .flatten()
            .flatten()
            .flat_map(|s| s.y.iter())
            .map(|y| values[y.0])
            .sum::<f64>()
            * self.penalties.charging;
        (install, low, charging)
    }
}
