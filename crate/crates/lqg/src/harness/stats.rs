//! Weight-aware two-sample and goodness-of-fit statistics.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{LqgError, Result};
use crate::gmc::{weighted_moment_estimate, MomentEstimate};
use crate::rng;

pub const KS_RESAMPLES: usize = 1000;

/// Values with positive importance weights (any common scale).
#[derive(Clone, Debug, PartialEq)]
pub struct WeightedSample {
    pub values: Vec<f64>,
    pub weights: Vec<f64>,
}

impl WeightedSample {
    pub fn unweighted(values: Vec<f64>) -> WeightedSample {
        let weights = vec![1.0; values.len()];
        WeightedSample { values, weights }
    }

    /// Weights `exp(lw - max lw)`.
    pub fn from_log_weights(values: Vec<f64>, log_weights: &[f64]) -> WeightedSample {
        let top = log_weights.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let weights = log_weights.iter().map(|l| (l - top).exp()).collect();
        WeightedSample { values, weights }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn ess(&self) -> f64 {
        effective_sample_size(&self.weights)
    }

    pub fn mean(&self) -> f64 {
        let total: f64 = self.weights.iter().sum();
        self.values.iter().zip(&self.weights).map(|(v, w)| v * w).sum::<f64>() / total
    }

    /// Weighted variance with the self-normalized estimator.
    pub fn variance(&self) -> f64 {
        let total: f64 = self.weights.iter().sum();
        let m = self.mean();
        self.values
            .iter()
            .zip(&self.weights)
            .map(|(v, w)| w * (v - m).powi(2))
            .sum::<f64>()
            / total
    }

    /// Standard error of [`WeightedSample::mean`] (delta method).
    pub fn mean_se(&self) -> f64 {
        let total: f64 = self.weights.iter().sum();
        let m = self.mean();
        let s: f64 = self
            .values
            .iter()
            .zip(&self.weights)
            .map(|(v, w)| (w / total * (v - m)).powi(2))
            .sum();
        s.sqrt()
    }

    fn check(&self) -> Result<()> {
        if self.is_empty() {
            return Err(LqgError::EmptySample);
        }
        if self.values.len() != self.weights.len() {
            return Err(LqgError::Config("values and weights differ in length".into()));
        }
        if let Some(w) = self.weights.iter().find(|w| !(**w > 0.0 && w.is_finite())) {
            return Err(LqgError::Config(format!("weight {w} is not positive")));
        }
        Ok(())
    }
}

/// `(sum w)^2 / sum w^2`.
pub fn effective_sample_size(weights: &[f64]) -> f64 {
    let s: f64 = weights.iter().sum();
    let s2: f64 = weights.iter().map(|w| w * w).sum();
    if s2 > 0.0 {
        s * s / s2
    } else {
        0.0
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct KsTest {
    pub statistic: f64,
    pub p_value: f64,
    pub reject: bool,
    pub ess_a: f64,
    pub ess_b: f64,
}

/// Pooled values in sorted order with, for each, the sample it came from and
/// its index there. `breaks[k]` marks the last entry of a run of equal values.
struct Pooled {
    src: Vec<(bool, usize)>,
    breaks: Vec<bool>,
}

impl Pooled {
    fn new(a: &[f64], b: &[f64]) -> Pooled {
        let mut all: Vec<(f64, bool, usize)> = a
            .iter()
            .enumerate()
            .map(|(i, v)| (*v, false, i))
            .chain(b.iter().enumerate().map(|(i, v)| (*v, true, i)))
            .collect();
        all.sort_by(|x, y| x.0.total_cmp(&y.0));
        let breaks = (0..all.len())
            .map(|k| k + 1 == all.len() || all[k + 1].0 != all[k].0)
            .collect();
        Pooled {
            src: all.iter().map(|x| (x.1, x.2)).collect(),
            breaks,
        }
    }

    /// `sup_x |sum_a ca[i] 1{a_i <= x} - sum_b cb[j] 1{b_j <= x}|` for
    /// coefficient vectors already normalized to the same total.
    fn sup(&self, ca: &[f64], cb: &[f64]) -> f64 {
        let mut d: f64 = 0.0;
        let mut acc = 0.0;
        for (k, (from_b, i)) in self.src.iter().enumerate() {
            acc += if *from_b { -cb[*i] } else { ca[*i] };
            if self.breaks[k] {
                d = d.max(acc.abs());
            }
        }
        d
    }
}

fn normalized(w: &[f64]) -> Vec<f64> {
    let t: f64 = w.iter().sum();
    w.iter().map(|x| x / t).collect()
}

/// Weighted Kolmogorov-Smirnov statistic `sup |F_a - F_b|` of the
/// self-normalized empirical distributions.
pub fn ks_statistic(a: &WeightedSample, b: &WeightedSample) -> Result<f64> {
    a.check()?;
    b.check()?;
    Ok(Pooled::new(&a.values, &b.values)
        .sup(&normalized(&a.weights), &normalized(&b.weights))
        .min(1.0))
}

/// Weighted two-sample KS test. The null distribution of the statistic comes
/// from a stratified bootstrap (each sample resampled within itself) of the
/// centered difference `(F*_a - F_a) - (F*_b - F_b)`; the p-value is
/// `(1 + #{D* >= D}) / (B + 1)`.
pub fn two_sample_test(a: &WeightedSample, b: &WeightedSample, alpha: f64, seed: u64) -> Result<KsTest> {
    a.check()?;
    b.check()?;
    let pooled = Pooled::new(&a.values, &b.values);
    let (wa, wb) = (normalized(&a.weights), normalized(&b.weights));
    // rounding can leave the sums a few ulps past 1
    let statistic = pooled.sup(&wa, &wb).min(1.0);
    let (na, nb) = (a.len(), b.len());
    let exceed = (0..KS_RESAMPLES as u64)
        .into_par_iter()
        .filter(|&r| {
            let mut g = rng::stream(seed, &[rng::MOD_HARNESS, 0x6b73, r]);
            let resample = |n: usize, w: &[f64], g: &mut rand_chacha::ChaCha8Rng| {
                let mut c = vec![0.0; n];
                for _ in 0..n {
                    let i = g.random_range(0..n);
                    c[i] += w[i];
                }
                normalized(&c).iter().zip(w).map(|(x, y)| x - y).collect::<Vec<f64>>()
            };
            let ca = resample(na, &wa, &mut g);
            let cb = resample(nb, &wb, &mut g);
            pooled.sup(&ca, &cb) >= statistic - 1e-12
        })
        .count();
    let p_value = (1.0 + exceed as f64) / (KS_RESAMPLES as f64 + 1.0);
    Ok(KsTest {
        statistic,
        p_value,
        reject: p_value < alpha,
        ess_a: a.ess(),
        ess_b: b.ess(),
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct Calibration {
    pub alpha: f64,
    pub repetitions: usize,
    pub rejections: usize,
    pub rate: f64,
    /// binomial standard error of the rejection rate at `alpha`
    pub se: f64,
    pub pass: bool,
}

/// Empirical size of [`two_sample_test`] on same-law inputs: one side plain
/// standard normal draws, the other normal draws centered at 1/2 reweighted
/// back to the standard normal. Passes when the rejection rate is within
/// three binomial standard errors of `alpha`.
pub fn calibrate(alpha: f64, repetitions: usize, n: usize, seed: u64) -> Result<Calibration> {
    if repetitions == 0 || n == 0 {
        return Err(LqgError::EmptySample);
    }
    let results: Vec<bool> = (0..repetitions as u64)
        .map(|r| {
            let mut g = rng::stream(seed, &[rng::MOD_HARNESS, 0xca1, r]);
            let a: Vec<f64> = (0..n).map(|_| -> f64 { StandardNormal.sample(&mut g) }).collect();
            let b: Vec<f64> = (0..n)
                .map(|_| {
                    let z: f64 = StandardNormal.sample(&mut g);
                    0.5 + z
                })
                .collect();
            let lw: Vec<f64> = b.iter().map(|x| -0.5 * x + 0.125).collect();
            let t = two_sample_test(
                &WeightedSample::unweighted(a),
                &WeightedSample::from_log_weights(b, &lw),
                alpha,
                seed ^ r.wrapping_mul(0x9e37),
            )?;
            Ok(t.reject)
        })
        .collect::<Result<Vec<bool>>>()?;
    let rejections = results.iter().filter(|r| **r).count();
    let rate = rejections as f64 / repetitions as f64;
    let se = (alpha * (1.0 - alpha) / repetitions as f64).sqrt();
    Ok(Calibration {
        alpha,
        repetitions,
        rejections,
        rate,
        se,
        pass: (rate - alpha).abs() <= 3.0 * se,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct AndersonDarling {
    /// `A^2` against the normal law with the sample's own mean and variance,
    /// times the small-sample factor `1 + 0.75/n + 2.25/n^2` (`n` = ESS)
    pub statistic: f64,
    pub critical: f64,
    pub reject: bool,
}

/// Normality test with estimated mean and variance. Weighted samples use the
/// weighted empirical distribution and their effective size.
pub fn anderson_darling_normal(x: &WeightedSample, alpha: f64) -> Result<AndersonDarling> {
    x.check()?;
    let critical = match alpha {
        a if (a - 0.01).abs() < 1e-12 => 1.035,
        a if (a - 0.025).abs() < 1e-12 => 0.873,
        a if (a - 0.05).abs() < 1e-12 => 0.752,
        a if (a - 0.1).abs() < 1e-12 => 0.631,
        a => {
            return Err(LqgError::Config(format!(
                "no Anderson-Darling critical value at level {a}"
            )))
        }
    };
    let (m, sd) = (x.mean(), x.variance().sqrt());
    let std = Normal::standard();
    let mut pts: Vec<(f64, f64)> = x
        .values
        .iter()
        .zip(normalized(&x.weights))
        .map(|(v, w)| (std.cdf((v - m) / sd), w))
        .collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    // integral of (F - u)^2 / (u (1 - u)) du over [u0, u1] with F = c constant
    let piece = |c: f64, u0: f64, u1: f64| {
        let u0 = u0.clamp(1e-300, 1.0);
        let u1 = u1.clamp(u0, 1.0 - 1e-16);
        let u0c = u0.min(1.0 - 1e-16);
        let mut v = -(u1 - u0);
        if c > 0.0 {
            v += c * c * (u1 / u0).ln();
        }
        if c < 1.0 {
            v -= (1.0 - c).powi(2) * ((1.0 - u1) / (1.0 - u0c)).ln();
        }
        v
    };
    let mut a2 = 0.0;
    let (mut c, mut u) = (0.0f64, 0.0f64);
    for (ui, w) in &pts {
        a2 += piece(c, u.max(1e-300), *ui);
        c += w;
        u = *ui;
    }
    a2 += piece(c.min(1.0), u, 1.0);
    let n = x.ess();
    let statistic = n * a2 * (1.0 + 0.75 / n + 2.25 / (n * n));
    Ok(AndersonDarling {
        statistic,
        critical,
        reject: statistic > critical,
    })
}

/// Weighted moments at each admissible `q` (positive, or negative when
/// `negative_ok`), skipping `q = 0` and repeats.
pub fn moment_table(x: &WeightedSample, qs: &[f64], negative_ok: bool, seed: u64) -> Result<Vec<MomentEstimate>> {
    x.check()?;
    let mut seen: Vec<f64> = Vec::new();
    let mut out = Vec::new();
    for &q in qs {
        if q == 0.0 || (q < 0.0 && !negative_ok) || seen.iter().any(|s| (s - q).abs() < 1e-12) {
            continue;
        }
        seen.push(q);
        out.push(weighted_moment_estimate(&x.values, Some(&x.weights), q, None, seed)?);
    }
    Ok(out)
}

/// Total variation between the law of a weighted sample and its reweighting
/// by `ratio`, on equal-count bins of the values: `(1/2) sum_bins |sum w (r - 1)|`
/// with `r` scaled to weighted mean 1.
pub fn reweighting_tv(x: &WeightedSample, ratio: &[f64], bins: usize) -> Result<f64> {
    x.check()?;
    if ratio.len() != x.len() || bins == 0 {
        return Err(LqgError::Config("ratio length or bin count".into()));
    }
    let w = normalized(&x.weights);
    let rbar: f64 = w.iter().zip(ratio).map(|(w, r)| w * r).sum();
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|a, b| x.values[*a].total_cmp(&x.values[*b]));
    let n = idx.len();
    let mut tv = 0.0;
    let mut start = 0;
    for k in 0..bins {
        let mut end = ((k + 1) * n) / bins;
        // keep ties in one bin
        while end > start && end < n && x.values[idx[end]] == x.values[idx[end - 1]] {
            end += 1;
        }
        let s: f64 = idx[start..end.max(start)]
            .iter()
            .map(|&i| w[i] * (ratio[i] / rbar - 1.0))
            .sum();
        tv += s.abs();
        start = end.max(start);
    }
    Ok(0.5 * tv)
}

/// Bootstrap standard error of a statistic of one weighted sample.
pub fn bootstrap_se<F>(x: &WeightedSample, resamples: usize, seed: u64, stat: F) -> Result<f64>
where
    F: Fn(&WeightedSample, &[usize]) -> Result<f64> + Sync,
{
    x.check()?;
    let n = x.len();
    let vals: Vec<f64> = (0..resamples as u64)
        .into_par_iter()
        .map(|r| {
            let mut g = rng::stream(seed, &[rng::MOD_HARNESS, 0xb5, r]);
            let idx: Vec<usize> = (0..n).map(|_| g.random_range(0..n)).collect();
            let s = WeightedSample {
                values: idx.iter().map(|&i| x.values[i]).collect(),
                weights: idx.iter().map(|&i| x.weights[i]).collect(),
            };
            stat(&s, &idx)
        })
        .collect::<Result<Vec<f64>>>()?;
    let m = vals.iter().sum::<f64>() / vals.len() as f64;
    Ok((vals.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (vals.len() - 1).max(1) as f64).sqrt())
}
