//! On-disk instance bundle: a directory holding `meta.json` plus the
//! `parking.csv`, `pp.csv` and `rho.csv` tables (and an optional
//! `distance.csv`). Indices are zero-based.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{ChargerType, FleetInstance, SlotRef, TimeGrid, Truck, Zone};

pub const BUNDLE_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct Meta {
    version: u32,
    grid: TimeGrid,
    soc_min: f64,
    soc_max: f64,
    anxiety_threshold: f64,
    epsilon: f64,
    chargers: Vec<ChargerType>,
    trucks: Vec<Truck>,
    zones: Vec<Zone>,
    special_zones: Vec<usize>,
    has_distance: bool,
}

/// Decimal rendering with at least six fractional digits that parses back
/// to the identical `f64`.
pub fn fmt_decimal(v: f64) -> String {
    let s = format!("{v}");
    let frac = s.find('.').map(|p| s.len() - p - 1);
    match frac {
        None => format!("{s}.000000"),
        Some(n) if n < 6 => format!("{s}{}", "0".repeat(6 - n)),
        Some(_) => s,
    }
}

pub fn write_bundle(instance: &FleetInstance, dir: &Path) -> Result<()> {
    instance.validate()?;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let meta = Meta {
        version: BUNDLE_VERSION,
        grid: instance.grid,
        soc_min: instance.soc_min,
        soc_max: instance.soc_max,
        anxiety_threshold: instance.anxiety_threshold,
        epsilon: instance.epsilon,
        chargers: instance.chargers.clone(),
        trucks: instance.trucks.clone(),
        zones: instance.zones.clone(),
        special_zones: instance
            .zones
            .iter()
            .enumerate()
            .filter(|(_, z)| z.is_special)
            .map(|(k, _)| k)
            .collect(),
        has_distance: instance.distance.is_some(),
    };
    let meta_path = dir.join("meta.json");
    let text = serde_json::to_string_pretty(&meta)?;
    fs::write(&meta_path, text).map_err(|e| Error::io(&meta_path, e))?;

    let grid = instance.grid;
    let mut parking = csv::Writer::from_path(dir.join("parking.csv"))?;
    parking.write_record(["truck", "day", "slot", "zone"])?;
    let mut pp = csv::Writer::from_path(dir.join("pp.csv"))?;
    pp.write_record(["truck", "day", "slot", "fraction"])?;
    let mut rho = csv::Writer::from_path(dir.join("rho.csv"))?;
    rho.write_record(["truck", "day", "slot", "kwh"])?;
    for i in 0..instance.num_trucks() {
        for k in 0..grid.horizon() {
            let at = grid.slot_at(k);
            let key = [i.to_string(), at.day.to_string(), at.slot.to_string()];
            if let Some(z) = instance.parking[i][k] {
                parking.write_record([&key[0], &key[1], &key[2], &z.to_string()])?;
                pp.write_record([&key[0], &key[1], &key[2], &fmt_decimal(instance.pp[i][k])])?;
            }
            if instance.rho[i][k] != 0.0 {
                rho.write_record([&key[0], &key[1], &key[2], &fmt_decimal(instance.rho[i][k])])?;
            }
        }
    }
    parking.flush().map_err(|e| Error::io(dir, e))?;
    pp.flush().map_err(|e| Error::io(dir, e))?;
    rho.flush().map_err(|e| Error::io(dir, e))?;

    if let Some(dist) = &instance.distance {
        let mut w = csv::Writer::from_path(dir.join("distance.csv"))?;
        w.write_record(["truck", "day", "slot", "distance"])?;
        for (i, row) in dist.iter().enumerate() {
            for (k, &v) in row.iter().enumerate() {
                if v != 0.0 {
                    let at = grid.slot_at(k);
                    w.write_record([i.to_string(), at.day.to_string(), at.slot.to_string(), fmt_decimal(v)])?;
                }
            }
        }
        w.flush().map_err(|e| Error::io(dir, e))?;
    }
    Ok(())
}

struct KeyedRow {
    truck: usize,
    day: usize,
    slot: usize,
    value: String,
}

fn read_table(path: &Path, grid: &TimeGrid, trucks: usize) -> Result<Vec<(usize, usize, String)>> {
    let mut rdr = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let row: KeyedRow = KeyedRow {
            truck: parse_field(&rec, 0, path)?,
            day: parse_field(&rec, 1, path)?,
            slot: parse_field(&rec, 2, path)?,
            value: rec.get(3).unwrap_or_default().to_string(),
        };
        let at = SlotRef::new(row.day, row.slot);
        if row.truck >= trucks || !grid.contains(at) {
            return Err(Error::OutOfRange(format!(
                "{}: row ({}, {}, {}) outside the instance",
                path.display(),
                row.truck,
                row.day,
                row.slot
            )));
        }
        out.push((row.truck, grid.index(at), row.value));
    }
    Ok(out)
}

fn parse_field<T: std::str::FromStr>(rec: &csv::StringRecord, k: usize, path: &Path) -> Result<T> {
    rec.get(k)
        .and_then(|s| s.trim().parse().ok())
        .ok_or_else(|| Error::invalid(format!("{}: bad field {k} in {:?}", path.display(), rec)))
}

fn parse_f64(s: &str, path: &Path) -> Result<f64> {
    s.trim()
        .parse()
        .map_err(|_| Error::invalid(format!("{}: `{s}` is not a number", path.display())))
}

pub fn read_bundle(dir: &Path) -> Result<FleetInstance> {
    let meta_path = dir.join("meta.json");
    let text = fs::read_to_string(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
    let meta: Meta = serde_json::from_str(&text)?;
    if meta.version != BUNDLE_VERSION {
        return Err(Error::invalid(format!(
            "bundle version {} is not supported (expected {BUNDLE_VERSION})",
            meta.version
        )));
    }
    let mut zones = meta.zones;
    for z in zones.iter_mut() {
        z.is_special = false;
    }
    for &k in &meta.special_zones {
        zones
            .get_mut(k)
            .ok_or_else(|| Error::invalid(format!("special zone {k} does not exist")))?
            .is_special = true;
    }
    let mut inst = FleetInstance::empty(meta.grid, meta.trucks, zones, meta.chargers);
    inst.soc_min = meta.soc_min;
    inst.soc_max = meta.soc_max;
    inst.anxiety_threshold = meta.anxiety_threshold;
    inst.epsilon = meta.epsilon;
    let n = inst.num_trucks();

    let path = dir.join("parking.csv");
    for (i, k, v) in read_table(&path, &meta.grid, n)? {
        let z: usize = v
            .trim()
            .parse()
            .map_err(|_| Error::invalid(format!("{}: bad zone `{v}`", path.display())))?;
        if inst.parking[i][k].is_some() {
            return Err(Error::invalid(format!(
                "{}: truck {i} appears in two zones at slot {k}",
                path.display()
            )));
        }
        inst.parking[i][k] = Some(z);
    }
    let path = dir.join("pp.csv");
    for (i, k, v) in read_table(&path, &meta.grid, n)? {
        inst.pp[i][k] = parse_f64(&v, &path)?;
    }
    let path = dir.join("rho.csv");
    for (i, k, v) in read_table(&path, &meta.grid, n)? {
        inst.rho[i][k] = parse_f64(&v, &path)?;
    }
    if meta.has_distance {
        let path = dir.join("distance.csv");
        let mut dist = vec![vec![0.0; meta.grid.horizon()]; n];
        for (i, k, v) in read_table(&path, &meta.grid, n)? {
            dist[i][k] = parse_f64(&v, &path)?;
        }
        inst.distance = Some(dist);
    }
    inst.validate()?;
    Ok(inst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::ChargerType;

    #[test]
    fn decimals_have_six_digits_and_round_trip() {
        for v in [0.5, 1.0, 5.0 / 30.0, 22.0 / 30.0, 3.0303030303, 0.0, 123456.25] {
            let s = fmt_decimal(v);
            let frac = s.split('.').nth(1).unwrap();
            assert!(frac.len() >= 6, "{s}");
            assert_eq!(s.parse::<f64>().unwrap(), v);
        }
    }

    #[test]
    fn bundle_round_trip() {
        let mut inst = FleetInstance::empty(
            TimeGrid::half_hourly(2),
            vec![Truck::new("a", 100.0), Truck::new("b", 80.0)],
            vec![Zone::new("Z1", true), Zone::new("Z2", false)],
            ChargerType::default_catalog(),
        );
        inst.park(0, SlotRef::new(0, 3), 0, 22.0 / 30.0);
        inst.park(1, SlotRef::new(1, 47), 1, 1.0);
        inst.set_rho(0, SlotRef::new(0, 10), 3.0303);
        inst.distance = Some(vec![vec![0.0; 96], vec![1.5; 96]]);
        let dir = tempfile::tempdir().unwrap();
        write_bundle(&inst, dir.path()).unwrap();
        let back = read_bundle(dir.path()).unwrap();
        assert_eq!(back, inst);
    }

    #[test]
    fn rejects_double_zone_claim() {
        let inst = FleetInstance::empty(
            TimeGrid::half_hourly(1),
            vec![Truck::new("a", 100.0)],
            vec![Zone::new("Z1", false), Zone::new("Z2", false)],
            ChargerType::default_catalog(),
        );
        let dir = tempfile::tempdir().unwrap();
        write_bundle(&inst, dir.path()).unwrap();
        std::fs::write(dir.path().join("parking.csv"), "truck,day,slot,zone\n0,0,1,0\n0,0,1,1\n").unwrap();
        std::fs::write(dir.path().join("pp.csv"), "truck,day,slot,fraction\n0,0,1,0.500000\n").unwrap();
        assert!(read_bundle(dir.path()).is_err());
    }
}
