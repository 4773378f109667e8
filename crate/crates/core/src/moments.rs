//! Spatial moment tables `m_s(n) = sum_x |x|^s tau_n(x)` and their CSV form.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::fmt_sig17;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NormMode {
    /// `|x|^s` with the Euclidean norm.
    Euclidean,
    /// `|x_1|^s`.
    FirstComponent,
}

impl NormMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            NormMode::Euclidean => "euclidean",
            NormMode::FirstComponent => "first-component",
        }
    }

    pub fn parse(s: &str) -> Option<NormMode> {
        match s {
            "euclidean" => Some(NormMode::Euclidean),
            "first-component" => Some(NormMode::FirstComponent),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Model {
    /// Discrete-generation oriented percolation (any epsilon).
    Op,
    /// Continuous-time contact process.
    Cp,
}

impl Model {
    pub fn as_str(&self) -> &'static str {
        match self {
            Model::Op => "op",
            Model::Cp => "cp",
        }
    }
}

/// Where the samples behind a table came from. Two rows can only be combined
/// in an inequality that is exact on empirical measures when their
/// provenance is identical.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub model: Model,
    pub d: usize,
    #[serde(rename = "L")]
    pub range: i64,
    pub p: f64,
    /// `None` for continuous time.
    pub eps: Option<f64>,
    pub seed: u64,
    pub samples: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentRow {
    /// Generation `n` for discrete models, time `t` for the contact process.
    pub time: f64,
    pub s: f64,
    pub norm: NormMode,
    pub mean: f64,
    pub stderr: f64,
    pub samples: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentTable {
    pub provenance: Provenance,
    pub rows: Vec<MomentRow>,
}

impl MomentTable {
    pub fn row(&self, time: f64, s: f64, norm: NormMode) -> Option<&MomentRow> {
        self.rows.iter().find(|r| r.time == time && r.s == s && r.norm == norm)
    }

    pub fn mean(&self, time: f64, s: f64, norm: NormMode) -> Option<f64> {
        self.row(time, s, norm).map(|r| r.mean)
    }

    /// Distinct times in increasing order.
    pub fn times(&self) -> Vec<f64> {
        let mut t: Vec<f64> = self.rows.iter().map(|r| r.time).collect();
        t.sort_by(f64::total_cmp);
        t.dedup();
        t
    }

    pub fn s_values(&self) -> Vec<f64> {
        let mut s: Vec<f64> = self.rows.iter().map(|r| r.s).collect();
        s.sort_by(f64::total_cmp);
        s.dedup();
        s
    }

    pub fn norms(&self) -> Vec<NormMode> {
        let mut n: Vec<NormMode> = self.rows.iter().map(|r| r.norm).collect();
        n.sort();
        n.dedup();
        n
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        write_tables_csv(std::slice::from_ref(self), w)
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv is utf-8")
    }
}

pub const CSV_HEADER: [&str; 12] =
    ["model", "d", "L", "p", "eps", "n", "s", "norm_mode", "mean", "stderr", "samples", "seed"];

fn fmt_time(model: Model, t: f64) -> String {
    if model == Model::Op && t.fract() == 0.0 {
        format!("{}", t as u64)
    } else {
        format!("{t}")
    }
}

pub fn write_tables_csv<W: Write>(tables: &[MomentTable], w: W) -> Result<()> {
    let mut out = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w);
    out.write_record(CSV_HEADER)?;
    for t in tables {
        let pv = &t.provenance;
        let eps = pv.eps.map(|e| format!("{e}")).unwrap_or_default();
        for r in &t.rows {
            out.write_record([
                pv.model.as_str().to_string(),
                pv.d.to_string(),
                pv.range.to_string(),
                format!("{}", pv.p),
                eps.clone(),
                fmt_time(pv.model, r.time),
                format!("{}", r.s),
                r.norm.as_str().to_string(),
                fmt_sig17(r.mean),
                fmt_sig17(r.stderr),
                r.samples.to_string(),
                pv.seed.to_string(),
            ])?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Reads a CSV written by [`write_tables_csv`], regrouping rows into one table
/// per distinct provenance in first-seen order.
pub fn read_tables_csv<R: Read>(r: R) -> Result<Vec<MomentTable>> {
    let mut rdr = csv::ReaderBuilder::new().from_reader(r);
    let headers = rdr.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != CSV_HEADER {
        return Err(Error::InvalidConfig(format!("unexpected CSV header {headers:?}")));
    }
    let mut tables: Vec<MomentTable> = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let bad = |what: &str| Error::InvalidConfig(format!("bad {what} in CSV row {rec:?}"));
        let num = |i: usize, what: &str| rec[i].parse::<f64>().map_err(|_| bad(what));
        let model = match &rec[0] {
            "op" => Model::Op,
            "cp" => Model::Cp,
            _ => return Err(bad("model")),
        };
        let eps = if rec[4].is_empty() { None } else { Some(num(4, "eps")?) };
        let prov = Provenance {
            model,
            d: rec[1].parse().map_err(|_| bad("d"))?,
            range: rec[2].parse().map_err(|_| bad("L"))?,
            p: num(3, "p")?,
            eps,
            seed: rec[11].parse().map_err(|_| bad("seed"))?,
            samples: rec[10].parse().map_err(|_| bad("samples"))?,
        };
        let row = MomentRow {
            time: num(5, "n")?,
            s: num(6, "s")?,
            norm: NormMode::parse(&rec[7]).ok_or_else(|| bad("norm_mode"))?,
            mean: num(8, "mean")?,
            stderr: num(9, "stderr")?,
            samples: prov.samples,
        };
        match tables.iter_mut().find(|t| t.provenance == prov) {
            Some(t) => t.rows.push(row),
            None => tables.push(MomentTable { provenance: prov, rows: vec![row] }),
        }
    }
    Ok(tables)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn table(mean: f64) -> MomentTable {
        MomentTable {
            provenance: Provenance { model: Model::Op, d: 2, range: 1, p: 1.0, eps: Some(1.0), seed: 9, samples: 10 },
            rows: vec![
                MomentRow { time: 3.0, s: 2.0, norm: NormMode::Euclidean, mean, stderr: 0.1, samples: 10 },
                MomentRow { time: 3.0, s: 2.0, norm: NormMode::FirstComponent, mean: 0.5, stderr: 0.0, samples: 10 },
            ],
        }
    }

    #[test]
    fn csv_layout() {
        let text = table(1.25).to_csv_string();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), CSV_HEADER.join(","));
        assert!(lines.next().unwrap().starts_with("op,2,1,1,1,3,2,euclidean,"));
        assert!(!text.contains('\r'));
    }

    #[test]
    fn rejects_foreign_header() {
        assert!(read_tables_csv("a,b\n1,2\n".as_bytes()).is_err());
    }

    proptest! {
        #[test]
        fn csv_round_trip(mean in -1e300f64..1e300) {
            let t = table(mean);
            let back = read_tables_csv(t.to_csv_string().as_bytes()).unwrap();
            prop_assert_eq!(back, vec![t]);
        }
    }
}
