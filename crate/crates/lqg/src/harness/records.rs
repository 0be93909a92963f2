//! One line per sample: tab-separated `key=value` pairs in a fixed order.
//! Reals are written with 17 significant digits, absent values as `na`.

use std::fs;
use std::io::Write;
use std::path::Path;

use super::estimate_observables;
use crate::constructions::{ConstructionTag, DiskSample};
use crate::error::{LqgError, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct SampleRecord {
    pub tag: ConstructionTag,
    pub gamma: f64,
    pub eps: Option<f64>,
    pub delta: Option<f64>,
    pub grid: usize,
    pub seed: u64,
    pub replica: u64,
    pub weight: f64,
    pub log_weight: f64,
    /// arc1, arc2, arc3, mu_total, mu_ball
    pub observables: [f64; 5],
    pub a_eps: Option<f64>,
    pub a_band: Option<f64>,
    pub t_root: Option<f64>,
    pub log_d: Option<f64>,
    /// boundary length before normalization
    pub nu_raw: Option<f64>,
    pub attempts: u64,
}

const FIELDS: [&str; 20] = [
    "construction_tag",
    "gamma",
    "eps",
    "delta",
    "grid",
    "seed",
    "replica",
    "weight",
    "log_w",
    "arc1",
    "arc2",
    "arc3",
    "mu_total",
    "mu_ball",
    "A_eps",
    "A_band",
    "t_root",
    "log_d",
    "nu_raw",
    "attempts",
];

fn real(x: f64) -> String {
    format!("{x:.16e}")
}

fn opt(x: Option<f64>) -> String {
    x.map(real).unwrap_or_else(|| "na".into())
}

impl SampleRecord {
    pub fn from_sample(sample: &DiskSample, grid: usize, seed: u64, replica: u64) -> SampleRecord {
        let d = |k: &str| sample.diag(k);
        SampleRecord {
            tag: sample.tag,
            gamma: sample.measures.gamma,
            eps: d("eps"),
            delta: d("delta"),
            grid,
            seed,
            replica,
            weight: sample.weight,
            log_weight: sample.log_weight,
            observables: estimate_observables(sample),
            a_eps: d("A_eps"),
            a_band: d("A_band"),
            t_root: d("t_root"),
            log_d: d("log_d"),
            nu_raw: d("nu_raw"),
            attempts: d("attempts").map(|a| a as u64).unwrap_or(1),
        }
    }

    pub fn to_line(&self) -> String {
        let o = &self.observables;
        let vals = [
            self.tag.as_str().to_string(),
            real(self.gamma),
            opt(self.eps),
            opt(self.delta),
            self.grid.to_string(),
            self.seed.to_string(),
            self.replica.to_string(),
            real(self.weight),
            real(self.log_weight),
            real(o[0]),
            real(o[1]),
            real(o[2]),
            real(o[3]),
            real(o[4]),
            opt(self.a_eps),
            opt(self.a_band),
            opt(self.t_root),
            opt(self.log_d),
            opt(self.nu_raw),
            self.attempts.to_string(),
        ];
        FIELDS
            .iter()
            .zip(vals)
            .map(|(k, v)| format!("{k}={v}"))
            .collect::<Vec<_>>()
            .join("\t")
    }

    pub fn parse_line(line: &str, lineno: usize) -> Result<SampleRecord> {
        let err = |msg: String| LqgError::Parse { line: lineno, msg };
        let mut vals: [Option<&str>; 20] = [None; 20];
        for part in line.split('\t') {
            let (k, v) = part
                .split_once('=')
                .ok_or_else(|| err(format!("`{part}` is not key=value")))?;
            let i = FIELDS
                .iter()
                .position(|f| *f == k)
                .ok_or_else(|| err(format!("unknown field `{k}`")))?;
            if vals[i].replace(v).is_some() {
                return Err(err(format!("field `{k}` given twice")));
            }
        }
        let get = |i: usize| vals[i].ok_or_else(|| err(format!("missing field `{}`", FIELDS[i])));
        let f = |i: usize| -> Result<f64> {
            get(i)?
                .parse::<f64>()
                .map_err(|_| err(format!("field `{}`: bad number `{}`", FIELDS[i], vals[i].unwrap_or(""))))
        };
        let of = |i: usize| -> Result<Option<f64>> {
            if get(i)? == "na" {
                Ok(None)
            } else {
                f(i).map(Some)
            }
        };
        let int = |i: usize| -> Result<u64> {
            get(i)?.parse::<u64>().map_err(|_| {
                err(format!(
                    "field `{}`: bad integer `{}`",
                    FIELDS[i],
                    vals[i].unwrap_or("")
                ))
            })
        };
        let tag = ConstructionTag::parse(get(0)?)
            .ok_or_else(|| err(format!("field `construction_tag`: unknown `{}`", vals[0].unwrap_or(""))))?;
        Ok(SampleRecord {
            tag,
            gamma: f(1)?,
            eps: of(2)?,
            delta: of(3)?,
            grid: int(4)? as usize,
            seed: int(5)?,
            replica: int(6)?,
            weight: f(7)?,
            log_weight: f(8)?,
            observables: [f(9)?, f(10)?, f(11)?, f(12)?, f(13)?],
            a_eps: of(14)?,
            a_band: of(15)?,
            t_root: of(16)?,
            log_d: of(17)?,
            nu_raw: of(18)?,
            attempts: int(19)?,
        })
    }
}

pub fn write_samples(path: &Path, records: &[SampleRecord]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let mut f = std::io::BufWriter::new(fs::File::create(path)?);
    for r in records {
        writeln!(f, "{}", r.to_line())?;
    }
    f.flush()?;
    Ok(())
}

/// Blank lines are skipped; line numbers in errors start at 1.
pub fn read_samples(path: &Path) -> Result<Vec<SampleRecord>> {
    let text = fs::read_to_string(path)?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| SampleRecord::parse_line(l, i + 1))
        .collect()
}
