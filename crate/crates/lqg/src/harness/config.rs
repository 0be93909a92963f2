//! `key = value` experiment files. Lists are comma separated; `#` starts a comment.

use std::path::{Path, PathBuf};

use super::OBSERVABLES;
use crate::error::{LqgError, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub gamma: Vec<f64>,
    /// strip grid sizes; comparisons use the last
    pub grid: Vec<usize>,
    pub eps: Vec<f64>,
    pub delta: Vec<f64>,
    /// replicas per sampler and setting
    pub n: usize,
    pub seed: u64,
    pub observables: Vec<String>,
    pub alpha: f64,
    pub output: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            gamma: vec![1.0, 2f64.sqrt(), 1.8],
            grid: vec![129],
            eps: vec![1e-3],
            delta: vec![0.5, 0.3, 0.1],
            n: 2000,
            seed: 1,
            observables: OBSERVABLES.iter().map(|s| s.to_string()).collect(),
            alpha: 0.01,
            output: PathBuf::from("lqg-out"),
        }
    }
}

fn list<T: std::str::FromStr>(v: &str, key: &str, line: usize) -> Result<Vec<T>> {
    v.split(',')
        .map(|s| s.trim())
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<T>().map_err(|_| LqgError::Parse {
                line,
                msg: format!("`{key}`: cannot read `{s}`"),
            })
        })
        .collect()
}

impl ExperimentConfig {
    /// Keys not given keep their defaults.
    pub fn parse(text: &str) -> Result<ExperimentConfig> {
        let mut c = ExperimentConfig::default();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let l = raw.split('#').next().unwrap_or("").trim();
            if l.is_empty() {
                continue;
            }
            let (k, v) = l
                .split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or_else(|| LqgError::Parse {
                    line,
                    msg: format!("`{l}` is not key = value"),
                })?;
            let one = |xs: Vec<u64>| -> Result<u64> {
                match xs.as_slice() {
                    [x] => Ok(*x),
                    _ => Err(LqgError::Parse {
                        line,
                        msg: format!("`{k}` takes one value"),
                    }),
                }
            };
            match k {
                "gamma" => c.gamma = list(v, k, line)?,
                "grid" => c.grid = list(v, k, line)?,
                "eps" => c.eps = list(v, k, line)?,
                "delta" => c.delta = list(v, k, line)?,
                "n" => c.n = one(list(v, k, line)?)? as usize,
                "seed" => c.seed = one(list(v, k, line)?)?,
                "observables" => c.observables = list(v, k, line)?,
                "alpha" => {
                    c.alpha = v.parse().map_err(|_| LqgError::Parse {
                        line,
                        msg: format!("`alpha`: cannot read `{v}`"),
                    })?
                }
                "output" => c.output = PathBuf::from(v),
                _ => {
                    return Err(LqgError::Parse {
                        line,
                        msg: format!("unknown key `{k}`"),
                    })
                }
            }
        }
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<ExperimentConfig> {
        ExperimentConfig::parse(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(LqgError::Config(m));
        if self.n < 100 {
            return bad(format!("n = {} is below 100", self.n));
        }
        if !(self.alpha > 0.0 && self.alpha <= 0.1) {
            return bad(format!("alpha = {} outside (0, 0.1]", self.alpha));
        }
        if self.gamma.is_empty() || self.gamma.iter().any(|g| !(*g > 0.0 && *g < 2.0)) {
            return bad(format!("gamma values {:?} must lie in (0, 2)", self.gamma));
        }
        if self.grid.is_empty() || self.eps.is_empty() || self.delta.is_empty() {
            return bad("grid, eps and delta need at least one value".into());
        }
        if self.eps.iter().any(|e| !(*e > 0.0 && *e < 1.0)) || self.delta.iter().any(|d| !(*d > 0.0)) {
            return bad("eps must lie in (0, 1) and delta be positive".into());
        }
        if let Some(o) = self.observables.iter().find(|o| !OBSERVABLES.contains(&o.as_str())) {
            return bad(format!("unknown observable `{o}`"));
        }
        Ok(())
    }

    pub fn observable_indices(&self) -> Vec<usize> {
        OBSERVABLES
            .iter()
            .enumerate()
            .filter(|(_, o)| self.observables.iter().any(|x| x == *o))
            .map(|(i, _)| i)
            .collect()
    }

    pub fn to_text(&self) -> String {
        let join = |v: Vec<String>| v.join(", ");
        format!(
            "gamma = {}\ngrid = {}\neps = {}\ndelta = {}\nn = {}\nseed = {}\nobservables = {}\nalpha = {}\noutput = {}\n",
            join(self.gamma.iter().map(|x| format!("{x:?}")).collect()),
            join(self.grid.iter().map(|x| x.to_string()).collect()),
            join(self.eps.iter().map(|x| format!("{x:?}")).collect()),
            join(self.delta.iter().map(|x| format!("{x:?}")).collect()),
            self.n,
            self.seed,
            self.observables.join(", "),
            self.alpha,
            self.output.display()
        )
    }
}
