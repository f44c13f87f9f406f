use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{ChargerKind, ChargerType};

/// Installed chargers per zone, indexed `[zone][ChargerKind as usize]`.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Installation {
    pub counts: Vec<[u32; 2]>,
}

impl Installation {
    pub fn zeros(zones: usize) -> Self {
        Self {
            counts: vec![[0, 0]; zones],
        }
    }

    pub fn get(&self, zone: usize, kind: ChargerKind) -> u32 {
        self.counts.get(zone).map_or(0, |c| c[kind as usize])
    }

    pub fn set(&mut self, zone: usize, kind: ChargerKind, n: u32) {
        self.counts[zone][kind as usize] = n;
    }

    pub fn total(&self, kind: ChargerKind) -> u32 {
        self.counts.iter().map(|c| c[kind as usize]).sum()
    }

    /// Capital cost of the installation under a charger catalog.
    pub fn cost(&self, catalog: &[ChargerType]) -> f64 {
        catalog
            .iter()
            .map(|c| f64::from(self.total(c.kind)) * c.capital_cost)
            .sum()
    }

    /// Component-wise `self >= other`.
    pub fn dominates(&self, other: &Installation) -> bool {
        self.counts.len() == other.counts.len()
            && self
                .counts
                .iter()
                .zip(&other.counts)
                .all(|(a, b)| a[0] >= b[0] && a[1] >= b[1])
    }

    /// Component-wise maximum.
    pub fn max_with(&self, other: &Installation) -> Installation {
        Installation {
            counts: self
                .counts
                .iter()
                .zip(&other.counts)
                .map(|(a, b)| [a[0].max(b[0]), a[1].max(b[1])])
                .collect(),
        }
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["zone", "slow", "fast"])?;
        for (z, c) in self.counts.iter().enumerate() {
            w.write_record([z.to_string(), c[0].to_string(), c[1].to_string()])?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }

    pub fn read_csv(path: &Path, zones: usize) -> Result<Self> {
        #[derive(Deserialize)]
        struct Row {
            zone: usize,
            slow: u32,
            fast: u32,
        }
        let mut out = Installation::zeros(zones);
        let mut rdr = csv::Reader::from_path(path)?;
        for row in rdr.deserialize() {
            let r: Row = row?;
            if r.zone >= zones {
                return Err(Error::OutOfRange(format!("{}: zone {} does not exist", path.display(), r.zone)));
            }
            out.counts[r.zone] = [r.slow, r.fast];
        }
        Ok(out)
    }
}
