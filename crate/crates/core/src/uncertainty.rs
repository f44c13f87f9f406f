//! Parking-duration moments, the decision-dependent box uncertainty set and
//! its linearised robust power bound, plus sampling from the box.
//!
//! The box for a parking slot charged with charger type `j` is
//! `[mu - k*sigma*gamma_j, mu + k*sigma*gamma_j] ∩ [5/30, 1]`, where `k` is the
//! sigma multiplier. Because the charging decision is binary, the worst case
//! over the box is its lower edge and the robust power bound stays linear.

use std::collections::BTreeMap;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{ChargerKind, ChargerType, FleetInstance, PP_MAX, PP_MIN};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct MomentKey {
    pub truck: usize,
    pub hour: usize,
    pub zone: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Moment {
    pub mu: f64,
    pub sigma: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UncertaintyMoments {
    pub entries: BTreeMap<MomentKey, Moment>,
    /// Reduction factor on sigma, indexed by [`ChargerKind`] (`slow`, `fast`).
    pub gamma: [f64; 2],
    pub sigma_multiplier: f64,
}

/// Sample mean and population standard deviation per key. Keys with a
/// single observation get zero spread.
pub fn compute_moments<I>(observations: I) -> Result<UncertaintyMoments>
where
    I: IntoIterator<Item = (MomentKey, f64)>,
{
    let mut groups: BTreeMap<MomentKey, Vec<f64>> = BTreeMap::new();
    for (key, x) in observations {
        groups.entry(key).or_default().push(x);
    }
    if groups.is_empty() {
        return Err(Error::invalid("no parking-duration observations"));
    }
    let entries = groups
        .into_iter()
        .map(|(key, xs)| {
            let n = xs.len() as f64;
            let mu = xs.iter().sum::<f64>() / n;
            let var = xs.iter().map(|x| (x - mu) * (x - mu)).sum::<f64>() / n;
            (key, Moment { mu, sigma: var.sqrt() })
        })
        .collect();
    Ok(UncertaintyMoments {
        entries,
        gamma: [1.0, 1.0],
        sigma_multiplier: 0.0,
    })
}

/// Every parking slot of the instance as a `(truck, hour, zone) -> pp`
/// observation.
pub fn observations_from_instance(inst: &FleetInstance) -> Vec<(MomentKey, f64)> {
    let mut out = Vec::new();
    for i in 0..inst.num_trucks() {
        for k in 0..inst.horizon() {
            if let Some(zone) = inst.parking[i][k] {
                let hour = inst.grid.hour_of_day(inst.grid.slot_at(k).slot);
                out.push((MomentKey { truck: i, hour, zone }, inst.pp[i][k]));
            }
        }
    }
    out
}

/// Lower edge of the box, clamped into `[5/30, 1]`.
pub fn robust_duration(mu: f64, sigma: f64, multiplier: f64, gamma: f64) -> f64 {
    (mu - multiplier * sigma * gamma).clamp(PP_MIN, PP_MAX)
}

/// Linearised robust power-bound coefficient (kWh per slot) for one charger type.
pub fn robust_coefficient(charger: &ChargerType, slot_hours: f64, mu: f64, sigma: f64, multiplier: f64, gamma: f64) -> f64 {
    charger.slot_energy(slot_hours) * robust_duration(mu, sigma, multiplier, gamma)
}

impl UncertaintyMoments {
    pub fn with_gamma(mut self, slow: f64, fast: f64) -> Self {
        self.gamma = [slow, fast];
        self
    }

    pub fn with_multiplier(mut self, k: f64) -> Self {
        self.sigma_multiplier = k;
        self
    }

    pub fn gamma_for(&self, kind: ChargerKind) -> f64 {
        self.gamma[kind as usize]
    }

    pub fn validate(&self) -> Result<()> {
        if self.gamma.iter().any(|g| !(0.0..=1.0).contains(g)) {
            return Err(Error::invalid("gamma must lie in [0, 1]"));
        }
        if !(self.sigma_multiplier >= 0.0) {
            return Err(Error::invalid("sigma multiplier must be non-negative"));
        }
        for (k, m) in &self.entries {
            if !(PP_MIN - 1e-9..=PP_MAX + 1e-9).contains(&m.mu) || !(m.sigma >= 0.0) {
                return Err(Error::invalid(format!("bad moment for {k:?}: {m:?}")));
            }
        }
        Ok(())
    }

    /// Moment for a parking slot, falling back to the instance's own
    /// duration with zero spread when the key was never observed.
    pub fn moment_at(&self, inst: &FleetInstance, truck: usize, index: usize) -> Option<Moment> {
        let zone = inst.parking[truck][index]?;
        let hour = inst.grid.hour_of_day(inst.grid.slot_at(index).slot);
        Some(
            self.entries
                .get(&MomentKey { truck, hour, zone })
                .copied()
                .unwrap_or(Moment {
                    mu: inst.pp[truck][index],
                    sigma: 0.0,
                }),
        )
    }

    /// Robust coefficient for charger `j` (catalog position) at a parking slot.
    pub fn coefficient_at(&self, inst: &FleetInstance, truck: usize, index: usize, j: usize) -> Option<f64> {
        let m = self.moment_at(inst, truck, index)?;
        let charger = &inst.chargers[j];
        Some(robust_coefficient(
            charger,
            inst.grid.slot_hours(),
            m.mu,
            m.sigma,
            self.sigma_multiplier,
            self.gamma_for(charger.kind),
        ))
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["truck", "hour", "zone", "mu", "sigma"])?;
        for (k, m) in &self.entries {
            w.write_record([
                k.truck.to_string(),
                k.hour.to_string(),
                k.zone.to_string(),
                crate::bundle::fmt_decimal(m.mu),
                crate::bundle::fmt_decimal(m.sigma),
            ])?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        #[derive(Deserialize)]
        struct Row {
            truck: usize,
            hour: usize,
            zone: usize,
            mu: f64,
            sigma: f64,
        }
        let mut rdr = csv::Reader::from_path(path)?;
        let mut entries = BTreeMap::new();
        for row in rdr.deserialize() {
            let r: Row = row?;
            entries.insert(
                MomentKey {
                    truck: r.truck,
                    hour: r.hour,
                    zone: r.zone,
                },
                Moment { mu: r.mu, sigma: r.sigma },
            );
        }
        if entries.is_empty() {
            return Err(Error::invalid(format!("{}: no moments", path.display())));
        }
        let m = UncertaintyMoments {
            entries,
            gamma: [1.0, 1.0],
            sigma_multiplier: 0.0,
        };
        m.validate()?;
        Ok(m)
    }
}

/// Sampled effective durations, one value per parking slot and charger type.
#[derive(Debug, Clone, PartialEq)]
pub struct PpSample {
    /// `[truck][slot][charger position]`; zero off parking slots.
    pub durations: Vec<Vec<[f64; 2]>>,
    pub seed: u64,
}

impl PpSample {
    pub fn get(&self, truck: usize, index: usize, j: usize) -> f64 {
        self.durations[truck][index][j]
    }
}

/// Draws one uniform variate per parking slot and maps it onto each charger
/// type's clamped box, so the sample is comonotone across types.
pub fn sample_pp(moments: &UncertaintyMoments, inst: &FleetInstance, seed: u64) -> PpSample {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = inst.horizon();
    let mut durations = vec![vec![[0.0; 2]; h]; inst.num_trucks()];
    for (i, row) in durations.iter_mut().enumerate() {
        for (k, cell) in row.iter_mut().enumerate() {
            let Some(m) = moments.moment_at(inst, i, k) else {
                continue;
            };
            let u: f64 = rng.gen();
            for (j, charger) in inst.chargers.iter().enumerate().take(2) {
                let r = moments.sigma_multiplier * m.sigma * moments.gamma_for(charger.kind);
                let lo = (m.mu - r).max(PP_MIN);
                let hi = (m.mu + r).min(PP_MAX);
                let (lo, hi) = if lo <= hi { (lo, hi) } else { (m.mu.clamp(PP_MIN, PP_MAX), m.mu.clamp(PP_MIN, PP_MAX)) };
                cell[j] = if r == 0.0 { m.mu } else { lo + u * (hi - lo) };
            }
        }
    }
    PpSample { durations, seed }
}

/// One term of a power bound: `eta * P * dt * y * (mu*y - sigma*gamma*y)`.
#[derive(Debug, Clone, Copy)]
pub struct BoundTerm {
    pub slot_energy: f64,
    pub mu: f64,
    pub sigma: f64,
    pub gamma: f64,
}

/// The robust bound before linearisation (products of binaries kept).
pub fn quadratic_power_bound(terms: &[BoundTerm], y: &[bool]) -> f64 {
    terms
        .iter()
        .zip(y)
        .map(|(t, &y)| {
            let y = f64::from(u8::from(y));
            t.slot_energy * y * (t.mu * y - t.sigma * t.gamma * y)
        })
        .sum()
}

/// The same bound after substituting the product variable `z = y*y` by `y`.
pub fn linear_power_bound(terms: &[BoundTerm], y: &[bool]) -> f64 {
    terms
        .iter()
        .zip(y)
        .map(|(t, &y)| {
            let y = f64::from(u8::from(y));
            t.slot_energy * (t.mu * y - t.sigma * t.gamma * y)
        })
        .sum()
}

/// Feasible values of the product variable `z` for a binary `y` under
/// `z <= y`, `z >= 2y - 1`, `z ∈ {0, 1}`.
pub fn product_values(y: bool) -> Vec<bool> {
    let y = i32::from(y);
    [false, true]
        .into_iter()
        .filter(|&z| {
            let z = i32::from(z);
            z <= y && z >= 2 * y - 1
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{SlotRef, TimeGrid, Truck, Zone};
    use approx::assert_abs_diff_eq;

    fn key(h: usize) -> MomentKey {
        MomentKey { truck: 0, hour: h, zone: 0 }
    }

    #[test]
    fn constant_observations_have_zero_spread() {
        let m = compute_moments([(key(1), 0.5), (key(1), 0.5), (key(1), 0.5)]).unwrap();
        assert_eq!(m.entries[&key(1)], Moment { mu: 0.5, sigma: 0.0 });
    }

    #[test]
    fn two_point_moments() {
        let m = compute_moments([(key(2), 5.0 / 30.0), (key(2), 1.0)]).unwrap();
        let e = m.entries[&key(2)];
        assert_abs_diff_eq!(e.mu, 0.583_333_333_333_333_4, epsilon = 1e-12);
        assert_abs_diff_eq!(e.sigma, 0.416_666_666_666_666_7, epsilon = 1e-12);
        assert!(!m.entries.contains_key(&key(3)));
    }

    #[test]
    fn empty_history_is_an_error() {
        assert!(compute_moments([]).is_err());
    }

    #[test]
    fn robust_coefficient_examples() {
        let fast = ChargerType::fast();
        assert_abs_diff_eq!(robust_coefficient(&fast, 0.5, 0.8, 0.2, 1.0, 0.5), 49.875, epsilon = 1e-9);
        assert_abs_diff_eq!(robust_coefficient(&fast, 0.5, 0.8, 0.2, 0.0, 0.5), 57.0, epsilon = 1e-9);
        assert_abs_diff_eq!(robust_coefficient(&fast, 0.5, 0.2, 0.5, 2.0, 1.0), 11.875, epsilon = 1e-9);
    }

    #[test]
    fn product_variable_equals_y() {
        assert_eq!(product_values(false), vec![false]);
        assert_eq!(product_values(true), vec![true]);
    }

    #[test]
    fn quadratic_equals_linear_exhaustively() {
        let terms: Vec<BoundTerm> = (0..12)
            .map(|k| BoundTerm {
                slot_energy: if k % 2 == 0 { 5.04 } else { 71.25 },
                mu: 0.2 + 0.06 * k as f64,
                sigma: 0.01 * k as f64,
                gamma: if k % 3 == 0 { 0.5 } else { 1.0 },
            })
            .collect();
        for n in 0..=12usize {
            for mask in 0u32..(1 << n) {
                let y: Vec<bool> = (0..n).map(|b| mask >> b & 1 == 1).collect();
                assert_eq!(quadratic_power_bound(&terms[..n], &y), linear_power_bound(&terms[..n], &y));
            }
        }
    }

    fn sample_instance() -> FleetInstance {
        let mut inst = FleetInstance::empty(
            TimeGrid::half_hourly(1),
            vec![Truck::new("t", 100.0)],
            vec![Zone::new("Z", false)],
            ChargerType::default_catalog(),
        );
        for s in 0..48 {
            inst.park(0, SlotRef::new(0, s), 0, 0.5);
        }
        inst
    }

    #[test]
    fn zero_sigma_samples_equal_mean() {
        let inst = sample_instance();
        let m = compute_moments(observations_from_instance(&inst)).unwrap().with_multiplier(2.0);
        let s = sample_pp(&m, &inst, 1);
        assert!(s.durations[0].iter().all(|d| d[0] == 0.5 && d[1] == 0.5));
    }

    #[test]
    fn samples_stay_in_box_and_are_reproducible() {
        let inst = sample_instance();
        let mut m = compute_moments(observations_from_instance(&inst)).unwrap().with_multiplier(1.0);
        for e in m.entries.values_mut() {
            e.sigma = 0.2;
        }
        let (mut lo, mut hi) = (f64::MAX, f64::MIN);
        for seed in 0..209u64 {
            let s = sample_pp(&m, &inst, seed);
            for d in &s.durations[0] {
                lo = lo.min(d[0]);
                hi = hi.max(d[0]);
            }
        }
        assert!(lo >= 0.3 - 1e-9 && hi <= 0.7 + 1e-9, "{lo} {hi}");
        assert!(lo < 0.31 && hi > 0.69);
        assert_eq!(sample_pp(&m, &inst, 9), sample_pp(&m, &inst, 9));
    }

    #[test]
    fn missing_keys_fall_back_to_instance() {
        let inst = sample_instance();
        let m = UncertaintyMoments {
            entries: BTreeMap::from([(key(99), Moment { mu: 0.9, sigma: 0.1 })]),
            gamma: [1.0, 1.0],
            sigma_multiplier: 2.0,
        };
        let coef = m.coefficient_at(&inst, 0, 3, 0).unwrap();
        assert_abs_diff_eq!(coef, 0.9 * 11.2 * 0.5 * 0.5, epsilon = 1e-12);
        assert!(m.coefficient_at(&inst, 0, 3, 1).is_some());
    }

    #[test]
    fn csv_round_trip() {
        let m = compute_moments([(key(2), 5.0 / 30.0), (key(2), 1.0), (key(5), 0.4)]).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.csv");
        m.write_csv(&p).unwrap();
        assert_eq!(UncertaintyMoments::read_csv(&p).unwrap(), m);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn coefficient_monotone_in_multiplier_and_gamma(
                mu in PP_MIN..=1.0f64,
                sigma in 0.0..0.5f64,
                k1 in 0.0..3.0f64,
                dk in 0.0..3.0f64,
                g1 in 0.0..=1.0f64,
                dg in 0.0..=1.0f64,
            ) {
                let fast = ChargerType::fast();
                let a = robust_coefficient(&fast, 0.5, mu, sigma, k1, g1);
                let b = robust_coefficient(&fast, 0.5, mu, sigma, k1 + dk, g1);
                prop_assert!(b <= a + 1e-12);
                let g2 = (g1 - dg).max(0.0);
                let c = robust_coefficient(&fast, 0.5, mu, sigma, k1, g2);
                prop_assert!(c >= a - 1e-12);
                prop_assert!(a >= 0.0);
                let det = robust_coefficient(&fast, 0.5, mu, sigma, 0.0, g1);
                prop_assert!((det - fast.slot_energy(0.5) * mu).abs() < 1e-12);
            }

            #[test]
            fn box_worst_case_is_the_linear_coefficient(
                mu in PP_MIN..=1.0f64,
                sigma in 0.0..0.5f64,
                k in 0.0..3.0f64,
                gamma in 0.0..=1.0f64,
                y in any::<bool>(),
            ) {
                let slow = ChargerType::slow();
                let e = slow.slot_energy(0.5);
                let yv = f64::from(u8::from(y));
                let r = k * sigma * gamma * yv;
                let lo = (mu * yv - r).max(PP_MIN);
                let hi = (mu * yv + r).min(PP_MAX).max(lo);
                let mut worst = f64::MAX;
                for s in 0..=200 {
                    let pp = lo + (hi - lo) * s as f64 / 200.0;
                    worst = worst.min(e * yv * pp);
                }
                let linear = robust_coefficient(&slow, 0.5, mu, sigma, k, gamma) * yv;
                prop_assert!((worst - linear).abs() < 1e-9, "{worst} vs {linear}");
            }
        }
    }
}
