//! Where the third point of the limiting procedure sits, across `eps`.

use super::{three_point_s, DiskSample};
use crate::error::{LqgError, Result};
use crate::geometry::GammaParams;
use crate::rng;
use rand::Rng;

const BOOTSTRAP: usize = 200;

#[derive(Clone, Debug, PartialEq)]
pub struct LocationRow {
    pub eps: f64,
    pub n: usize,
    pub ess: f64,
    /// weighted quantiles (25%, 50%, 75%) of `|log w| / |log eps|^{2/3}`
    pub ratio_quartiles: [f64; 3],
    pub median_se: f64,
    /// weighted frequency of `A_eps - s log eps >= -|log eps|^{2/3}`
    pub h_freq: f64,
    pub h_se: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LocationTable {
    /// by decreasing `eps`
    pub rows: Vec<LocationRow>,
    /// `None` with fewer than two values of `eps`
    pub h_increasing: Option<bool>,
    pub median_decreasing: Option<bool>,
}

fn weighted_quantile(v: &[(f64, f64)], q: f64) -> f64 {
    let mut s: Vec<(f64, f64)> = v.to_vec();
    s.sort_by(|a, b| a.0.total_cmp(&b.0));
    let total: f64 = s.iter().map(|x| x.1).sum();
    let mut acc = 0.0;
    for (x, w) in &s {
        acc += w;
        if acc >= q * total {
            return *x;
        }
    }
    s.last().map(|x| x.0).unwrap_or(f64::NAN)
}

/// What the location summaries need from one sample.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LocationInput {
    pub eps: f64,
    pub gamma: f64,
    pub log_weight: f64,
    /// abscissa of the third point in the strip chart, `log |w|` up to sign
    pub t_root: f64,
    pub a_band: f64,
}

/// Per-`eps` summaries of shared-sampler output. Samples need the diagnostics
/// `eps`, `t_root` and `A_band`.
pub fn location_diagnostics(samples: &[DiskSample]) -> Result<LocationTable> {
    let rows = samples
        .iter()
        .map(|s| {
            let need = |k: &str| {
                s.diag(k)
                    .ok_or_else(|| LqgError::Config(format!("sample lacks diagnostic {k}")))
            };
            Ok(LocationInput {
                eps: need("eps")?,
                gamma: s.measures.gamma,
                log_weight: s.log_weight,
                t_root: need("t_root")?,
                a_band: need("A_band")?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    location_table(&rows)
}

pub fn location_table(samples: &[LocationInput]) -> Result<LocationTable> {
    if samples.is_empty() {
        return Err(LqgError::EmptySample);
    }
    let mut eps_values: Vec<f64> = Vec::new();
    for s in samples {
        if !eps_values.iter().any(|x| (x / s.eps - 1.0).abs() < 1e-9) {
            eps_values.push(s.eps);
        }
    }
    eps_values.sort_by(|a, b| b.total_cmp(a));
    let mut rows = Vec::new();
    for &eps in &eps_values {
        let group: Vec<&LocationInput> = samples.iter().filter(|s| (s.eps / eps - 1.0).abs() < 1e-9).collect();
        let params = GammaParams::new(group[0].gamma)?;
        let s = three_point_s(&params);
        let scale = eps.ln().abs().powf(2.0 / 3.0);
        let top = group.iter().map(|x| x.log_weight).fold(f64::NEG_INFINITY, f64::max);
        let w: Vec<f64> = group.iter().map(|x| (x.log_weight - top).exp()).collect();
        let ratio: Vec<(f64, f64)> = group
            .iter()
            .zip(&w)
            .map(|(x, w)| (x.t_root.abs() / scale, *w))
            .collect();
        let hit: Vec<(f64, f64)> = group
            .iter()
            .zip(&w)
            .map(|(x, w)| (if x.a_band - s * eps.ln() >= -scale { 1.0 } else { 0.0 }, *w))
            .collect();
        let total: f64 = w.iter().sum();
        let ess = total * total / w.iter().map(|x| x * x).sum::<f64>();
        let h_freq = hit.iter().map(|(h, w)| h * w).sum::<f64>() / total;
        let mut g = rng::stream(eps.to_bits(), &[rng::MOD_HARNESS, 0x10c]);
        let n = group.len();
        let mut meds = Vec::with_capacity(BOOTSTRAP);
        for _ in 0..BOOTSTRAP {
            let r: Vec<(f64, f64)> = (0..n).map(|_| ratio[g.random_range(0..n)]).collect();
            meds.push(weighted_quantile(&r, 0.5));
        }
        let mm = meds.iter().sum::<f64>() / BOOTSTRAP as f64;
        let median_se = (meds.iter().map(|x| (x - mm).powi(2)).sum::<f64>() / (BOOTSTRAP - 1) as f64).sqrt();
        rows.push(LocationRow {
            eps,
            n,
            ess,
            ratio_quartiles: [0.25, 0.5, 0.75].map(|q| weighted_quantile(&ratio, q)),
            median_se,
            h_freq,
            h_se: (h_freq * (1.0 - h_freq) / ess).sqrt(),
        });
    }
    let (h_increasing, median_decreasing) = if rows.len() < 2 {
        (None, None)
    } else {
        let h = rows
            .windows(2)
            .all(|r| r[1].h_freq >= r[0].h_freq - 2.0 * r[0].h_se.hypot(r[1].h_se));
        let m = rows
            .windows(2)
            .all(|r| r[1].ratio_quartiles[1] <= r[0].ratio_quartiles[1] + 2.0 * r[0].median_se.hypot(r[1].median_se));
        (Some(h), Some(m))
    };
    Ok(LocationTable {
        rows,
        h_increasing,
        median_decreasing,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constructions::{ConstructionTag, DEFAULT_POINTS};
    use crate::gmc::GmcPair;
    use std::collections::BTreeMap;

    fn fake(eps: f64, t: f64, a: f64) -> DiskSample {
        let mut d = BTreeMap::new();
        d.insert("eps".to_string(), eps);
        d.insert("t_root".to_string(), t);
        d.insert("A_band".to_string(), a);
        DiskSample {
            measures: GmcPair {
                domain: crate::geometry::Domain::UnitDisk,
                bulk: vec![],
                boundary: vec![],
                gamma: 2f64.sqrt(),
                field_ref: String::new(),
            },
            marked_points: DEFAULT_POINTS,
            tag: ConstructionTag::SharedWeighted,
            weight: 1.0,
            log_weight: 0.0,
            diagnostics: d,
        }
    }

    #[test]
    fn empty_and_single_inputs() {
        assert_eq!(location_diagnostics(&[]), Err(LqgError::EmptySample));
        let t = location_diagnostics(&[fake(1e-2, -0.5, 0.3)]).unwrap();
        assert_eq!(t.rows.len(), 1);
        assert_eq!(t.h_increasing, None);
        let scale = (1e-2f64).ln().abs().powf(2.0 / 3.0);
        assert!((t.rows[0].ratio_quartiles[1] - 0.5 / scale).abs() < 1e-12);
        assert_eq!(t.rows[0].h_freq, 1.0);
    }

    #[test]
    fn trends_are_reported_by_decreasing_eps() {
        let mut v = Vec::new();
        for k in 0..50 {
            v.push(fake(1e-1, 0.1 * k as f64, if k % 2 == 0 { -5.0 } else { 0.0 }));
            v.push(fake(1e-3, 0.01 * k as f64, 0.0));
        }
        let t = location_diagnostics(&v).unwrap();
        assert_eq!(t.rows[0].eps, 1e-1);
        assert_eq!(t.h_increasing, Some(true));
        assert_eq!(t.median_decreasing, Some(true));
    }
}
