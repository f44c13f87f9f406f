//! Solver-agnostic linear model: columns with bounds, kinds and costs, and
//! tagged one-sided rows. Exported in CPLEX LP text format.

use std::fmt;
use std::io::{self, Write};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VarId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarKind {
    Continuous,
    Integer,
    Binary,
}

impl VarKind {
    pub fn is_integral(self) -> bool {
        !matches!(self, VarKind::Continuous)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Variable {
    pub name: String,
    pub kind: VarKind,
    pub lb: f64,
    pub ub: f64,
    pub cost: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Le,
    Ge,
    Eq,
}

/// Constraint family a row belongs to. Row names are `<tag>_<indices>`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RowTag {
    SingleCharger,
    LowSocLower,
    LowSocUpper,
    AbandonNoCharge,
    AbandonMonotone,
    WaitRecursion,
    WaitReset,
    WaitCap,
    Balance,
    Cyclic,
    PowerBound,
    FastCapBefore,
    FastCapDuring,
    Capacity,
    Shortfall,
    SocBounds,
    ParkingWindow,
}

impl RowTag {
    pub const ALL: [RowTag; 17] = [
        RowTag::SingleCharger,
        RowTag::LowSocLower,
        RowTag::LowSocUpper,
        RowTag::AbandonNoCharge,
        RowTag::AbandonMonotone,
        RowTag::WaitRecursion,
        RowTag::WaitReset,
        RowTag::WaitCap,
        RowTag::Balance,
        RowTag::Cyclic,
        RowTag::PowerBound,
        RowTag::FastCapBefore,
        RowTag::FastCapDuring,
        RowTag::Capacity,
        RowTag::Shortfall,
        RowTag::SocBounds,
        RowTag::ParkingWindow,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            RowTag::SingleCharger => "singlecharger",
            RowTag::LowSocLower => "lowsoclo",
            RowTag::LowSocUpper => "lowsochi",
            RowTag::AbandonNoCharge => "abandonnocharge",
            RowTag::AbandonMonotone => "abandonmonotone",
            RowTag::WaitRecursion => "waitrecursion",
            RowTag::WaitReset => "waitreset",
            RowTag::WaitCap => "waitcap",
            RowTag::Balance => "balance",
            RowTag::Cyclic => "cyclic",
            RowTag::PowerBound => "powerbound",
            RowTag::FastCapBefore => "fastcapbefore",
            RowTag::FastCapDuring => "fastcapduring",
            RowTag::Capacity => "capacity",
            RowTag::Shortfall => "shortfall",
            RowTag::SocBounds => "socbounds",
            RowTag::ParkingWindow => "parkingwindow",
        }
    }

    pub fn parse(s: &str) -> Option<RowTag> {
        RowTag::ALL.into_iter().find(|t| t.as_str() == s)
    }
}

impl fmt::Display for RowTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub name: String,
    pub tag: RowTag,
    pub terms: Vec<(VarId, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

impl Row {
    pub fn activity(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|(v, c)| c * x[v.0]).sum()
    }

    /// Amount by which `x` violates the row (0 when satisfied).
    pub fn violation(&self, x: &[f64]) -> f64 {
        let act = self.activity(x);
        match self.sense {
            Sense::Le => (act - self.rhs).max(0.0),
            Sense::Ge => (self.rhs - act).max(0.0),
            Sense::Eq => (act - self.rhs).abs(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinearModel {
    pub vars: Vec<Variable>,
    pub rows: Vec<Row>,
}

impl LinearModel {
    pub fn add_var(&mut self, name: String, kind: VarKind, lb: f64, ub: f64, cost: f64) -> VarId {
        let (lb, ub) = if kind == VarKind::Binary { (lb.max(0.0), ub.min(1.0)) } else { (lb, ub) };
        self.vars.push(Variable { name, kind, lb, ub, cost });
        VarId(self.vars.len() - 1)
    }

    pub fn add_row(&mut self, name: String, tag: RowTag, terms: Vec<(VarId, f64)>, sense: Sense, rhs: f64) -> usize {
        self.rows.push(Row {
            name,
            tag,
            terms,
            sense,
            rhs,
        });
        self.rows.len() - 1
    }

    pub fn objective(&self, x: &[f64]) -> f64 {
        self.vars.iter().zip(x).map(|(v, x)| v.cost * x).sum()
    }

    pub fn num_integral(&self) -> usize {
        self.vars.iter().filter(|v| v.kind.is_integral()).count()
    }

    /// Largest row, bound or integrality violation of `x`, with a label.
    pub fn max_violation(&self, x: &[f64]) -> (f64, String) {
        let mut worst = (0.0, String::new());
        for row in &self.rows {
            let v = row.violation(x);
            if v > worst.0 {
                worst = (v, row.name.clone());
            }
        }
        for (var, &val) in self.vars.iter().zip(x) {
            let v = (var.lb - val).max(val - var.ub).max(0.0);
            if v > worst.0 {
                worst = (v, format!("bound {}", var.name));
            }
            if var.kind.is_integral() {
                let v = (val - val.round()).abs();
                if v > worst.0 {
                    worst = (v, format!("integrality {}", var.name));
                }
            }
        }
        worst
    }

    pub fn rows_with_tag(&self, tag: RowTag) -> impl Iterator<Item = &Row> {
        self.rows.iter().filter(move |r| r.tag == tag)
    }

    pub fn find_row(&self, name: &str) -> Option<&Row> {
        self.rows.iter().find(|r| r.name == name)
    }

    /// Writes the model in CPLEX LP format.
    pub fn write_lp<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "\\ fleetcharge planning model")?;
        writeln!(out, "Minimize")?;
        let obj: Vec<(VarId, f64)> = self
            .vars
            .iter()
            .enumerate()
            .filter(|(_, v)| v.cost != 0.0)
            .map(|(k, v)| (VarId(k), v.cost))
            .collect();
        write!(out, " obj:")?;
        if obj.is_empty() {
            write!(out, " 0 {}", self.vars.first().map(|v| v.name.as_str()).unwrap_or("dummy"))?;
        }
        self.write_terms(&mut out, &obj)?;
        writeln!(out)?;
        writeln!(out, "Subject To")?;
        for row in &self.rows {
            write!(out, " {}:", row.name)?;
            if row.terms.is_empty() {
                write!(out, " 0 {}", self.vars.first().map(|v| v.name.as_str()).unwrap_or("dummy"))?;
            }
            self.write_terms(&mut out, &row.terms)?;
            let op = match row.sense {
                Sense::Le => "<=",
                Sense::Ge => ">=",
                Sense::Eq => "=",
            };
            writeln!(out, " {op} {}", num(row.rhs))?;
        }
        writeln!(out, "Bounds")?;
        for v in &self.vars {
            if v.kind == VarKind::Binary && v.lb == 0.0 && v.ub == 1.0 {
                continue;
            }
            match (v.lb.is_finite(), v.ub.is_finite()) {
                (true, true) if v.lb == v.ub => writeln!(out, " {} = {}", v.name, num(v.lb))?,
                (true, true) => writeln!(out, " {} <= {} <= {}", num(v.lb), v.name, num(v.ub))?,
                (true, false) if v.lb == 0.0 => {}
                (true, false) => writeln!(out, " {} >= {}", v.name, num(v.lb))?,
                (false, true) => writeln!(out, " -inf <= {} <= {}", v.name, num(v.ub))?,
                (false, false) => writeln!(out, " {} free", v.name)?,
            }
        }
        let generals: Vec<&str> = self
            .vars
            .iter()
            .filter(|v| v.kind == VarKind::Integer)
            .map(|v| v.name.as_str())
            .collect();
        if !generals.is_empty() {
            writeln!(out, "Generals")?;
            for chunk in generals.chunks(8) {
                writeln!(out, " {}", chunk.join(" "))?;
            }
        }
        let binaries: Vec<&str> = self
            .vars
            .iter()
            .filter(|v| v.kind == VarKind::Binary)
            .map(|v| v.name.as_str())
            .collect();
        if !binaries.is_empty() {
            writeln!(out, "Binaries")?;
            for chunk in binaries.chunks(8) {
                writeln!(out, " {}", chunk.join(" "))?;
            }
        }
        writeln!(out, "End")
    }

    fn write_terms<W: Write>(&self, out: &mut W, terms: &[(VarId, f64)]) -> io::Result<()> {
        for (k, (var, coef)) in terms.iter().enumerate() {
            if k > 0 && k % 6 == 0 {
                write!(out, "\n  ")?;
            }
            let sign = if *coef < 0.0 { '-' } else { '+' };
            write!(out, " {sign} {} {}", num(coef.abs()), self.vars[var.0].name)?;
        }
        Ok(())
    }
}

fn num(v: f64) -> String {
    if v == f64::INFINITY {
        "inf".into()
    } else if v == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{v}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lp_text_has_sections_and_names() {
        let mut m = LinearModel::default();
        let x = m.add_var("x_0_1".into(), VarKind::Integer, 0.0, 5.0, 38000.0);
        let y = m.add_var("y_0_0_3_1".into(), VarKind::Binary, 0.0, 1.0, 1.0);
        let b = m.add_var("b_0_0_3".into(), VarKind::Continuous, 0.1, 1.0, 0.0);
        m.add_row("capacity_0_1_0_3".into(), RowTag::Capacity, vec![(y, 1.0), (x, -1.0)], Sense::Le, 0.0);
        m.add_row("fastcapbefore_0_0_3".into(), RowTag::FastCapBefore, vec![(b, 1.0), (y, 0.2)], Sense::Le, 1.0);
        let mut buf = Vec::new();
        m.write_lp(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.contains("Minimize"));
        assert!(text.contains(" capacity_0_1_0_3: + 1 y_0_0_3_1 - 1 x_0_1 <= 0"));
        assert!(text.contains(" 0.1 <= b_0_0_3 <= 1"));
        assert!(text.contains("Generals\n x_0_1"));
        assert!(text.contains("Binaries\n y_0_0_3_1"));
        assert!(text.trim_end().ends_with("End"));
    }

    #[test]
    fn violation_measures() {
        let mut m = LinearModel::default();
        let a = m.add_var("a".into(), VarKind::Continuous, 0.0, 1.0, 0.0);
        m.add_row("r".into(), RowTag::Balance, vec![(a, 2.0)], Sense::Eq, 1.0);
        assert_eq!(m.max_violation(&[0.5]).0, 0.0);
        let (v, name) = m.max_violation(&[0.75]);
        assert!((v - 0.5).abs() < 1e-12 && name == "r");
        assert!(RowTag::ALL.iter().all(|t| RowTag::parse(t.as_str()) == Some(*t)));
    }
}
