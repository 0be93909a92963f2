//! The half-disk limiting procedure in the half-strip chart.
//!
//! The half-disk `eps^{-1/2} D ∩ H` is the half-strip `t > t0 = (1/2) log eps`
//! with zero boundary values on its left edge. There the field is
//! `-C_eps - (Q - gamma)(t - t0) + B(t - t0) + angular`, with `B` a Brownian
//! motion of variance 2 per unit started at the edge and the angular part a
//! zero-line-mean GFF vanishing on the edge.
//!
//! The boundary-length band is imposed through the value `A = B(-t0)` on the
//! unit semicircle: writing `B = A phi + R` with `phi(u) = min(u / (-t0), 1)`
//! and `R` independent of `A`, the boundary length is increasing in `A`, so
//! the band is an interval of `A`. `A` is drawn from its Gaussian law
//! restricted to that interval. The interval's probability `p` is handled by
//! rejection control against a level estimated from pilot fields: the field
//! is kept with probability `min(1, p / level)` and carries `max(p, level)`
//! as importance weight.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use statrs::distribution::{ContinuousCDF, Normal};

use super::{
    boundary_in_order, disk_frame, halfplane_root, pick_by_mass, root_to_top, strip_to_disk, ConstructionTag,
    DiskSample, StripResolution, DEFAULT_POINTS,
};
use crate::error::{LqgError, Result};
use crate::geometry::{pushforward_measure, GammaParams};
use crate::gff::strip::cached_strip_sampler;
use crate::gff::{Grid, GridField, StripSampler};
use crate::gmc::GmcPair;
use crate::rng;

/// Fewest rows giving 8 nodes per unit length around the unit semicircle.
const MIN_ROWS: usize = 26;

const PILOT_FIELDS: u64 = 64;
const PILOT_COLUMNS: usize = 80;
const PILOT_SEED: u64 = 0x5eed;
const WIDE_SHARE: f64 = 0.1;
const LEVEL_QUANTILE: f64 = 0.8;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LimitingConfig {
    /// The half-disk is `eps^{-1/2} D ∩ H`.
    pub eps: f64,
    /// Boundary length band `[e^{-gamma delta}, e^{gamma delta}]`.
    pub delta: f64,
    /// Fresh fields allowed before giving up on the band.
    pub max_attempts: usize,
}

impl LimitingConfig {
    pub fn new(eps: f64, delta: f64) -> Result<LimitingConfig> {
        if !(eps > 0.0 && eps < 1.0) {
            return Err(LqgError::Config(format!("eps = {eps} outside (0, 1)")));
        }
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(LqgError::Config(format!("delta = {delta} must be positive")));
        }
        Ok(LimitingConfig {
            eps,
            delta,
            max_attempts: 1000,
        })
    }

    /// `(1/2)(Q - gamma) log(1/eps)`.
    pub fn c_eps(&self, params: &GammaParams) -> f64 {
        0.5 * params.drift() * (1.0 / self.eps).ln()
    }

    /// `1 / (|w|^2 eps)` for the half-plane root `w`.
    pub fn d_eps(&self, w: f64) -> f64 {
        1.0 / (w * w * self.eps)
    }

    pub fn left_edge(&self) -> f64 {
        0.5 * self.eps.ln()
    }
}

/// Interval of `a` with `sum_i exp(lnc_i + (gamma/2) phi_i a)` in
/// `[e^{-gamma delta}, e^{gamma delta}]`; the sum must be increasing in `a`.
pub fn band_interval(lnc: &[f64], phi: &[f64], gamma: f64, delta: f64) -> Result<(f64, f64)> {
    if !phi.iter().any(|p| *p > 0.0) {
        return Err(LqgError::Geometry(
            "boundary length does not depend on the level".into(),
        ));
    }
    let log_nu = |a: f64| {
        let top = lnc
            .iter()
            .zip(phi)
            .map(|(c, p)| c + 0.5 * gamma * p * a)
            .fold(f64::NEG_INFINITY, f64::max);
        top + lnc
            .iter()
            .zip(phi)
            .map(|(c, p)| (c + 0.5 * gamma * p * a - top).exp())
            .sum::<f64>()
            .ln()
    };
    let solve = |target: f64| -> Result<f64> {
        let (mut lo, mut hi) = (-1.0, 1.0);
        let mut k = 0;
        while log_nu(lo) > target {
            lo = 2.0 * lo - 1.0;
            k += 1;
            if k > 200 {
                return Err(LqgError::Geometry("band unreachable from below".into()));
            }
        }
        while log_nu(hi) < target {
            hi = 2.0 * hi + 1.0;
            k += 1;
            if k > 400 {
                return Err(LqgError::Geometry("band unreachable from above".into()));
            }
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if log_nu(mid) < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    };
    Ok((solve(-gamma * delta)?, solve(gamma * delta)?))
}

/// `N(0, sigma^2)` restricted to `[lo, hi]`, by inversion on the tail closer to
/// the interval. Returns the draw and the probability of the interval.
pub fn truncated_normal<R: Rng>(rng: &mut R, sigma: f64, lo: f64, hi: f64) -> (f64, f64) {
    let std = Normal::standard();
    let (a, b) = (lo / sigma, hi / sigma);
    let u: f64 = rng.random();
    let x = if a > 0.0 {
        let (pa, pb) = (std.cdf(-b), std.cdf(-a));
        (-std.inverse_cdf(pa + u * (pb - pa)), pb - pa)
    } else {
        let (pa, pb) = (std.cdf(a), std.cdf(b));
        (std.inverse_cdf(pa + u * (pb - pa)), pb - pa)
    };
    (sigma * x.0.clamp(a, b), x.1)
}

/// Everything about a `(grid, gamma, delta)` setting that does not depend on the sample.
struct Frame {
    sampler: Arc<StripSampler>,
    /// distance of each column from the left edge
    u: Vec<f64>,
    phi: Vec<f64>,
    /// deterministic radial part per column
    det: Vec<f64>,
    /// `-t0`, where `A` is read
    u_a: f64,
    /// boundary nodes per column
    bnodes: Vec<Vec<usize>>,
    proposal: OnceLock<Proposal>,
}

/// Law from which the weighted sampler draws its root, with the exact
/// expected boundary measure of each edge.
struct Proposal {
    nodes: Vec<usize>,
    log_intensity: Vec<f64>,
    /// pilot estimate of the log band probability with the root at each node
    log_level: Vec<f64>,
    /// same without a root
    log_level_free: f64,
    prob: Vec<f64>,
    cumulative: Vec<f64>,
}

fn frame(params: &GammaParams, cfg: &LimitingConfig, res: &StripResolution) -> Result<Arc<Frame>> {
    let m = res.rows()?;
    if m < MIN_ROWS {
        return Err(LqgError::GridTooCoarse(format!(
            "{m} rows; at least {MIN_ROWS} are needed"
        )));
    }
    let dt = PI / m as f64;
    let t0 = cfg.left_edge();
    let t_hi = t0 + ((res.window(params) - t0) / dt).ceil() * dt;
    let grid = Arc::new(Grid::strip(t0, t_hi, m, true)?);
    let key = format!("{}|{:.17e}|{:.17e}", grid.id, params.gamma, cfg.delta);
    static C: OnceLock<Mutex<Vec<(String, Arc<Frame>)>>> = OnceLock::new();
    let cache = C.get_or_init(|| Mutex::new(Vec::new()));
    if let Some((_, f)) = cache
        .lock()
        .unwrap_or_else(|e| e.into_inner())
        .iter()
        .find(|(k, _)| *k == key)
    {
        return Ok(f.clone());
    }
    let sampler = cached_strip_sampler(grid.clone())?;
    let u_a = -t0;
    let u: Vec<f64> = (0..sampler.ncols).map(|i| sampler.column_t(i) - t0).collect();
    let phi: Vec<f64> = u.iter().map(|x| (x / u_a).min(1.0)).collect();
    let c = cfg.c_eps(params);
    let det: Vec<f64> = u.iter().map(|x| -c - params.drift() * x).collect();
    let ny = m + 1;
    let bnodes: Vec<Vec<usize>> = (0..sampler.ncols)
        .map(|i| (i * ny..(i + 1) * ny).filter(|&k| grid.edge[k] > 0.0).collect())
        .collect();
    let f = Arc::new(Frame {
        sampler,
        u,
        phi,
        det,
        u_a,
        bnodes,
        proposal: OnceLock::new(),
    });
    let mut c = cache.lock().unwrap_or_else(|e| e.into_inner());
    if c.len() >= 16 {
        c.remove(0);
    }
    c.push((key, f.clone()));
    Ok(f)
}

impl Frame {
    fn sigma_a(&self) -> f64 {
        (2.0 * self.u_a).sqrt()
    }

    /// Brownian part without its value at `u_a`: `R = W - phi W(u_a)`.
    fn residual<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        let mut w = Vec::with_capacity(self.u.len());
        let (mut x, mut prev) = (0.0, 0.0);
        let mut w_a = None;
        for &u in &self.u {
            if w_a.is_none() && u >= self.u_a {
                let z: f64 = StandardNormal.sample(rng);
                x += (2.0 * (self.u_a - prev)).sqrt() * z;
                prev = self.u_a;
                w_a = Some(x);
            }
            let z: f64 = StandardNormal.sample(rng);
            x += (2.0 * (u - prev)).sqrt() * z;
            prev = u;
            w.push(x);
        }
        let w_a = w_a.unwrap_or_else(|| {
            let z: f64 = StandardNormal.sample(rng);
            x + (2.0 * (self.u_a - prev)).sqrt() * z
        });
        w.iter().zip(&self.phi).map(|(v, p)| v - p * w_a).collect()
    }

    /// Log boundary mass per column of `values` (the field without `A phi`).
    fn column_log_mass(&self, values: &[f64], params: &GammaParams) -> Vec<f64> {
        let g = params.gamma;
        let grid = &self.sampler.grid;
        let meta = &self.sampler.meta;
        self.bnodes
            .iter()
            .map(|nodes| {
                let e: Vec<f64> = nodes
                    .iter()
                    .map(|&k| {
                        grid.edge[k].ln() + 0.5 * g * values[k] - 0.125 * g * g * meta.variance[k]
                            + 0.125 * g * g * meta.bdry_diag[k]
                    })
                    .collect();
                let top = e.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                top + e.iter().map(|x| (x - top).exp()).sum::<f64>().ln()
            })
            .collect()
    }

    fn proposal(&self, params: &GammaParams, delta: f64) -> Result<&Proposal> {
        if let Some(p) = self.proposal.get() {
            return Ok(p);
        }
        let g = params.gamma;
        let grid = &self.sampler.grid;
        let meta = &self.sampler.meta;
        let sigma = self.sigma_a();
        let std = Normal::standard();
        let band_prob = |lnc: &[f64]| -> Result<f64> {
            let (lo, hi) = band_interval(lnc, &self.phi, g, delta)?;
            let p = if lo > 0.0 {
                std.cdf(-lo / sigma) - std.cdf(-hi / sigma)
            } else {
                std.cdf(hi / sigma) - std.cdf(lo / sigma)
            };
            Ok(p.max(0.0))
        };
        // band probability per root column, averaged over pilot fields and
        // interpolated in log from a coarse set of columns
        let pilots: Vec<Vec<f64>> = (0..PILOT_FIELDS)
            .map(|j| {
                let ang = self
                    .sampler
                    .sample_angular(&mut rng::stream(PILOT_SEED, &[rng::MOD_SHARED_ROOT, 2, j]));
                let r = self.residual(&mut rng::stream(PILOT_SEED, &[rng::MOD_SHARED_ROOT, 3, j]));
                let radial: Vec<f64> = self.det.iter().zip(&r).map(|(d, r)| d + r).collect();
                self.column_log_mass(&self.sampler.assemble(&radial, &ang), params)
            })
            .collect();
        // (log mean, log upper quantile) of the band probability over pilots
        let summary = |mut ps: Vec<f64>| {
            let mean = ps.iter().sum::<f64>() / ps.len() as f64;
            ps.sort_by(|a, b| a.total_cmp(b));
            let q = ps[((ps.len() - 1) as f64 * LEVEL_QUANTILE).round() as usize];
            (mean.max(f64::MIN_POSITIVE).ln(), q.max(f64::MIN_POSITIVE).ln())
        };
        let free = summary(pilots.iter().map(|lm| band_prob(lm)).collect::<Result<Vec<f64>>>()?);
        let ncols = self.u.len();
        let step = (ncols / PILOT_COLUMNS).max(1);
        let mut knots: Vec<usize> = (0..ncols).step_by(step).collect();
        if *knots.last().expect("columns") != ncols - 1 {
            knots.push(ncols - 1);
        }
        let mut at_knots = Vec::with_capacity(knots.len());
        for &x in &knots {
            let ux = self.u[x];
            let ps = pilots
                .iter()
                .map(|lm| {
                    let lnc: Vec<f64> = lm
                        .iter()
                        .zip(&self.u)
                        .map(|(b, u)| b + 0.5 * g * g * u.min(ux))
                        .collect();
                    band_prob(&lnc)
                })
                .collect::<Result<Vec<f64>>>()?;
            at_knots.push(summary(ps));
        }
        let (mut reach, mut level) = (Vec::with_capacity(ncols), Vec::with_capacity(ncols));
        for i in 0..ncols {
            let k = knots.partition_point(|&x| x <= i).clamp(1, knots.len() - 1);
            let (x0, x1) = (knots[k - 1], knots[k]);
            let s = if x1 > x0 {
                (i - x0) as f64 / (x1 - x0) as f64
            } else {
                0.0
            };
            let (a, b) = (at_knots[k - 1], at_knots[k]);
            reach.push(a.0 + s * (b.0 - a.0));
            level.push(a.1 + s * (b.1 - a.1));
        }
        let mut nodes = Vec::new();
        let mut log_intensity = Vec::new();
        let mut log_level = Vec::new();
        let mut close = Vec::new();
        let mut wide = Vec::new();
        for (i, col) in self.bnodes.iter().enumerate() {
            for &k in col {
                let li =
                    grid.edge[k].ln() + 0.5 * g * self.det[i] + 0.125 * g * g * (meta.bdry_diag[k] + 2.0 * self.u[i]);
                nodes.push(k);
                log_intensity.push(li);
                log_level.push(level[i]);
                close.push(li + reach[i]);
                wide.push(li + 0.5 * reach[i]);
            }
        }
        // mostly the pilot estimate of the root's law, with a wider component
        // against pilot fields that miss where the band is reachable
        let normalize = |v: &[f64]| {
            let top = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let w: Vec<f64> = v.iter().map(|x| (x - top).exp()).collect();
            let total: f64 = w.iter().sum();
            w.into_iter().map(move |x| x / total)
        };
        let prob: Vec<f64> = normalize(&close)
            .zip(normalize(&wide))
            .map(|(a, b)| (1.0 - WIDE_SHARE) * a + WIDE_SHARE * b)
            .collect();
        let mut acc = 0.0;
        let cumulative = prob
            .iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect();
        let _ = self.proposal.set(Proposal {
            nodes,
            log_intensity,
            log_level,
            log_level_free: free.1,
            prob,
            cumulative,
        });
        Ok(self.proposal.get().expect("just set"))
    }
}

/// One sample of the limiting procedure at `(eps, delta)`, with the third
/// point drawn from the boundary measure (`weighted = false`) or the field
/// and point drawn jointly from the boundary-length weighted law
/// (`weighted = true`). In the weighted case the point comes first, from its
/// exact marginal intensity, and the field is shifted by `(gamma/2)` times its
/// covariance with the field at the point.
///
/// Measures are normalized to unit boundary length and embedded with the
/// point at `-i` and `0, inf` of the half-plane at `-1, 1`.
pub fn sample_shared_limiting(
    params: &GammaParams,
    cfg: &LimitingConfig,
    weighted: bool,
    res: &StripResolution,
    seed: u64,
) -> Result<DiskSample> {
    let f = frame(params, cfg, res)?;
    let g = params.gamma;
    let mu = params.drift();
    let grid = f.sampler.grid.clone();
    let ny = f.sampler.m + 1;
    let sigma = f.sigma_a();
    let prop = f.proposal(params, cfg.delta)?;
    for attempt in 0..cfg.max_attempts.max(1) as u64 {
        let mut log_weight = 0.0;
        let mut pick = 0;
        let root = if weighted {
            let u: f64 = rng::stream(seed, &[rng::MOD_SHARED_ROOT, 0, attempt]).random();
            pick = prop.cumulative.partition_point(|c| *c < u).min(prop.nodes.len() - 1);
            log_weight += prop.log_intensity[pick] - prop.prob[pick].ln();
            Some(prop.nodes[pick])
        } else {
            None
        };
        let angular = f
            .sampler
            .sample_angular(&mut rng::stream(seed, &[rng::MOD_SHARED, 0, attempt]));
        let r = f.residual(&mut rng::stream(seed, &[rng::MOD_SHARED, 1, attempt]));
        let radial_free: Vec<f64> = (0..f.u.len())
            .map(|i| f.det[i] + r[i] + root.map(|x| g * f.u[i].min(f.u[x / ny])).unwrap_or(0.0))
            .collect();
        let mut values = f.sampler.assemble(&radial_free, &angular);
        if let Some(x) = root {
            let cov = f.sampler.angular_covariance_column(x);
            values.iter_mut().zip(&cov).for_each(|(v, c)| *v += 0.5 * g * c);
        }
        let lnc = f.column_log_mass(&values, params);
        let (lo, hi) = band_interval(&lnc, &f.phi, g, cfg.delta)?;
        let (a, p) = truncated_normal(&mut rng::stream(seed, &[rng::MOD_SHARED, 2, attempt]), sigma, lo, hi);
        // rejection control: keep with probability min(1, p / level) and
        // carry max(p, level), where level is the pilot band probability
        let level = match root {
            Some(_) => prop.log_level[pick],
            None => prop.log_level_free,
        }
        .exp();
        let keep: f64 = rng::stream(seed, &[rng::MOD_SHARED, 4, attempt]).random();
        if !(p > 0.0) || keep * level >= p {
            continue;
        }
        log_weight += p.max(level).ln();
        for (i, phi) in f.phi.iter().enumerate() {
            values[i * ny..(i + 1) * ny].iter_mut().for_each(|v| *v += a * phi);
        }
        let field = GridField {
            grid: grid.clone(),
            values,
            meta: Some(f.sampler.meta.clone()),
            deterministic: None,
            flagged: Vec::new(),
        };
        let pair = GmcPair::from_field(&field, params)?;
        let nu = pair.boundary_total();
        let x = match root {
            Some(x) => x,
            None => {
                let u = rng::stream(seed, &[rng::MOD_SHARED, 3, attempt]).random::<f64>() * nu;
                let c = pick_by_mass(&boundary_in_order(&pair.boundary), u);
                grid.locate(c.pos)
                    .ok_or_else(|| LqgError::Geometry("root off the grid".into()))?
            }
        };
        let col = x / ny;
        let w = grid.nodes[x];
        let t_x = w.re;
        let w_hat = halfplane_root(w);
        let radial_band = radial_free[col] + a * f.phi[col];
        let a_free = if weighted {
            let z: f64 = StandardNormal.sample(&mut rng::stream(seed, &[rng::MOD_SHARED_ROOT, 1, attempt]));
            radial_free[col] + sigma * z * f.phi[col]
        } else {
            radial_band
        };
        let map = strip_to_disk(root_to_top(w), disk_frame(&DEFAULT_POINTS)?);
        let measures = pushforward_measure(&pair.scaled(nu.powi(-2), 1.0 / nu), &map)?;
        let mut d = BTreeMap::new();
        d.insert("eps".into(), cfg.eps);
        d.insert("delta".into(), cfg.delta);
        d.insert("A_eps".into(), a_free - mu * t_x);
        d.insert("A_band".into(), radial_band - mu * t_x);
        d.insert("log_d".into(), 2.0 * f.u[col]);
        d.insert("w_hat".into(), w_hat);
        d.insert("t_root".into(), t_x);
        d.insert("nu_raw".into(), nu);
        d.insert("band_prob".into(), p);
        d.insert("band_level".into(), level);
        d.insert("attempts".into(), (attempt + 1) as f64);
        let tag = if weighted {
            ConstructionTag::SharedWeighted
        } else {
            ConstructionTag::SharedUnweighted
        };
        return Ok(DiskSample {
            measures,
            marked_points: DEFAULT_POINTS,
            tag,
            weight: log_weight.exp(),
            log_weight,
            diagnostics: d,
        });
    }
    Err(LqgError::MaxAttemptsExceeded {
        attempts: cfg.max_attempts.max(1),
        rate: 0.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn res() -> StripResolution {
        StripResolution {
            n: 57,
            window: Some(10.0),
        }
    }

    #[test]
    fn derived_constants() {
        let p = GammaParams::new(1.5).unwrap();
        let c = LimitingConfig::new(1e-3, 0.3).unwrap();
        assert!(c.c_eps(&p) > 0.0);
        assert!((c.d_eps(1.0) - 1e3).abs() < 1e-9);
        assert!(LimitingConfig::new(1.5, 0.3).is_err());
        assert!(LimitingConfig::new(0.1, 0.0).is_err());
    }

    #[test]
    fn band_interval_brackets_the_band() {
        let lnc = [-1.0, 0.5, -2.0];
        let phi = [0.2, 1.0, 1.0];
        let (lo, hi) = band_interval(&lnc, &phi, 1.5, 0.3).unwrap();
        let nu = |a: f64| lnc.iter().zip(&phi).map(|(c, p)| (c + 0.75 * p * a).exp()).sum::<f64>();
        assert!((nu(lo).ln() + 0.45).abs() < 1e-9);
        assert!((nu(hi).ln() - 0.45).abs() < 1e-9);
    }

    #[test]
    fn truncated_normal_stays_inside_and_matches_probability() {
        let mut g = rng::stream(1, &[2]);
        let std = Normal::standard();
        for (lo, hi) in [(-1.0, 0.5), (3.0, 3.4), (-9.0, -8.5)] {
            let (x, p) = truncated_normal(&mut g, 2.0, lo, hi);
            assert!(x >= lo && x <= hi);
            let q = std.cdf(hi / 2.0) - std.cdf(lo / 2.0);
            assert!((p / q - 1.0).abs() < 1e-6, "{p} {q}");
        }
    }

    #[test]
    fn coarse_grid_is_rejected() {
        let p = GammaParams::new(1.5).unwrap();
        let c = LimitingConfig::new(1e-2, 0.3).unwrap();
        let r = StripResolution { n: 33, window: None };
        assert!(matches!(
            sample_shared_limiting(&p, &c, false, &r, 0),
            Err(LqgError::GridTooCoarse(_))
        ));
    }

    #[test]
    fn samples_land_in_the_band_and_are_normalized() {
        let p = GammaParams::new(1.5).unwrap();
        let c = LimitingConfig::new(1e-2, 0.3).unwrap();
        for weighted in [false, true] {
            for seed in 0..3 {
                let s = sample_shared_limiting(&p, &c, weighted, &res(), seed).unwrap();
                let nu = s.diagnostics["nu_raw"];
                assert!(nu.ln().abs() <= 1.5 * 0.3 + 1e-9, "{nu}");
                assert!((s.measures.boundary_total() - 1.0).abs() < 1e-12);
                assert!(s.weight > 0.0 && s.weight.is_finite());
                let log_d = s.diagnostics["log_d"];
                let w = s.diagnostics["w_hat"];
                assert!((c.d_eps(w).ln() - log_d).abs() < 1e-9);
            }
        }
    }
}
