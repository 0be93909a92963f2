//! The three-insertion field weighted by its boundary (or bulk) length, and
//! the Bessel-encoded disk with a third point drawn from its boundary measure.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, Exp, StandardNormal};

use super::{
    boundary_in_order, disk_frame, pick_by_mass, root_to_top, strip_to_disk, three_point_s, ConstructionTag,
    DiskSample, StripResolution,
};
use crate::bessel::{conditioned_positive, normalize_unit_boundary, regenerate, UnitBoundaryOptions};
use crate::error::{LqgError, Result};
use crate::geometry::{pushforward_measure, ConformalMap, Domain, GammaParams, Point, I};
use crate::gff::{Grid, GridField, InsertionSet, StripSampler};
use crate::gmc::{check_insertion_bounds, BoundsMode, GmcPair};
use crate::rng;

/// Upper limit on whole-path proposals for the side that must stay below the maximum.
const MAX_SIDE_TRIES: usize = 1_000_000;

/// `(gamma/2)(G_H(z, 1) - line mean)` in the strip chart,
/// `-(gamma/2) log(1 + 2 e^{-|t|} cos y + e^{-2|t|})`, evaluated at least `h/2`
/// away from the singularity at `i pi`.
pub fn strip_insertion_profile(w: Point, params: &GammaParams, h: f64) -> f64 {
    let p = I * PI;
    let d = w - p;
    let w = if d.norm() >= 0.5 * h {
        w
    } else if d.norm() > 0.0 {
        p + d / d.norm() * (0.5 * h)
    } else {
        p - I * (0.5 * h)
    };
    let e = (-w.re.abs()).exp();
    -0.5 * params.gamma * (1.0 + 2.0 * e * w.im.cos() + e * e).ln()
}

/// Radial part of the three-insertion field on the strip, with the law of its
/// maximum `S` tilted by `e^{-sS}`.
///
/// Without the tilt the radial part is a two-sided Brownian motion of
/// variance 2 per unit from 0 with drift `-(Q - gamma)|t|`, whose maximum is
/// the larger of two `Exp(Q - gamma)` variables. Tilted, `S` is the sum of
/// independent `Exp(gamma/2)` and `Exp(Q - gamma/2)` variables. Given `S` the
/// path splits at its maximum: drift `+(Q - gamma)` up to the hitting time of
/// `S`, then `S` minus a drifted 3d Bessel process; the other side is a
/// drift `-(Q - gamma)` path conditioned to stay below `S`.
#[derive(Clone, Debug)]
pub struct TiltedRadial {
    /// index of the first column; column `k` sits at `k dt`
    pub k_lo: i64,
    pub values: Vec<f64>,
    pub top: f64,
    /// column of the maximum
    pub argmax: i64,
    pub side_tries: usize,
}

impl TiltedRadial {
    pub fn sample<R: Rng>(params: &GammaParams, dt: f64, window: f64, rng: &mut R) -> Result<TiltedRadial> {
        let mu = params.drift();
        let g = params.gamma;
        let bad = |e: rand_distr::ExpError| LqgError::Config(e.to_string());
        let top = Exp::new(0.5 * g).map_err(bad)?.sample(rng) + Exp::new(params.q - 0.5 * g).map_err(bad)?.sample(rng);
        let right: bool = rng.random_bool(0.5);
        let sd = (2.0 * dt).sqrt();
        let n_w = (window / dt).ceil() as usize;

        // climb to the maximum
        let mut up = vec![0.0];
        let mut x = 0.0;
        loop {
            let z: f64 = StandardNormal.sample(rng);
            let y = x + mu * dt + sd * z;
            let crossed = y >= top || rng.random::<f64>() < (-(top - x) * (top - y) / dt).exp();
            if crossed {
                up.push(top);
                break;
            }
            up.push(y);
            x = y;
            if up.len() > 100_000_000 {
                return Err(LqgError::StepSize(format!("no hit of level {top} with step {dt}")));
            }
        }
        let tau = up.len() - 1;
        let times: Vec<f64> = (1..=n_w).map(|k| k as f64 * dt).collect();
        let down: Vec<f64> = conditioned_positive(rng, mu, &times)
            .into_iter()
            .map(|v| top - v)
            .collect();

        // the other side, below the maximum
        let mut other = Vec::with_capacity(n_w);
        let mut tries = 0;
        'outer: loop {
            tries += 1;
            if tries > MAX_SIDE_TRIES {
                return Err(LqgError::MaxAttemptsExceeded {
                    attempts: MAX_SIDE_TRIES,
                    rate: 1.0 - (-mu * top).exp(),
                });
            }
            other.clear();
            let mut x = 0.0;
            for _ in 0..n_w {
                let z: f64 = StandardNormal.sample(rng);
                let y = x - mu * dt + sd * z;
                if y >= top || rng.random::<f64>() < (-(top - x) * (top - y) / dt).exp() {
                    continue 'outer;
                }
                other.push(y);
                x = y;
            }
            break;
        }

        // forward order along the max side: other (reversed), 0..tau, down
        let mut path: Vec<f64> = other.iter().rev().copied().collect();
        path.extend(&up);
        path.extend(&down);
        let n_other = other.len() as i64;
        let (k_lo, argmax, values) = if right {
            (-n_other, tau as i64, path)
        } else {
            path.reverse();
            (-(tau as i64) - n_w as i64, -(tau as i64), path)
        };
        Ok(TiltedRadial {
            k_lo,
            values,
            top,
            argmax,
            side_tries: tries,
        })
    }

    pub fn k_hi(&self) -> i64 {
        self.k_lo + self.values.len() as i64 - 1
    }
}

fn check_points(params: &GammaParams, points: &[Point; 3], mode: BoundsMode) -> Result<ConformalMap> {
    let ins = InsertionSet::boundary_only(&points.map(|p| (params.gamma, p)));
    let v = check_insertion_bounds(&ins, params, mode);
    if !v.pass {
        return Err(LqgError::BoundsViolation(v.reasons));
    }
    disk_frame(points)
}

struct HrvField {
    pair: GmcPair,
    radial: TiltedRadial,
}

fn hrv_field(params: &GammaParams, res: &StripResolution, seed: u64) -> Result<HrvField> {
    let m = res.rows()?;
    let dt = PI / m as f64;
    let window = res.window(params);
    let radial = TiltedRadial::sample(params, dt, window, &mut rng::stream(seed, &[rng::MOD_HRV, 0]))?;
    let grid = Arc::new(Grid::strip(
        radial.k_lo as f64 * dt,
        radial.k_hi() as f64 * dt,
        m,
        false,
    )?);
    let sampler = StripSampler::new(grid.clone())?;
    debug_assert_eq!(sampler.ncols, radial.values.len());
    let angular = sampler.sample_angular(&mut rng::stream(seed, &[rng::MOD_HRV, 1]));
    let profile = lattice_insertion(&sampler, radial.k_lo, params);
    let mut values = sampler.assemble(&radial.values, &angular);
    values.iter_mut().zip(&profile).for_each(|(v, p)| *v += p);
    let det: Vec<f64> = (0..grid.len())
        .map(|k| profile[k] + radial.values[k / (m + 1)])
        .collect();
    let field = GridField {
        grid: grid.clone(),
        values,
        meta: Some(sampler.meta.clone()),
        deterministic: Some(det),
        flagged: (0..grid.len())
            .filter(|&k| (grid.nodes[k] - I * PI).norm() < 0.5 * dt)
            .collect(),
    };
    Ok(HrvField {
        pair: GmcPair::from_field(&field, params)?,
        radial,
    })
}

/// `(gamma/2)` times the lattice covariance of the angular part with its value
/// at `i pi`: the insertion there as a tilt by the boundary measure of that
/// node, matching a point drawn from the lattice boundary measure. Away from
/// `i pi` it agrees with [`strip_insertion_profile`].
fn lattice_insertion(sampler: &StripSampler, k_lo: i64, params: &GammaParams) -> Vec<f64> {
    let node = (-k_lo) as usize * (sampler.m + 1) + sampler.m;
    let mut col = sampler.angular_covariance_column(node);
    col.iter_mut().for_each(|c| *c *= 0.5 * params.gamma);
    col
}

fn hrv_diagnostics(f: &HrvField, dt: f64) -> BTreeMap<String, f64> {
    let mut d = BTreeMap::new();
    d.insert("radial_max".into(), f.radial.top);
    d.insert("t_max".into(), f.radial.argmax as f64 * dt);
    d.insert("side_tries".into(), f.radial.side_tries as f64);
    d.insert("nu_raw".into(), f.pair.boundary_total());
    d.insert("mu_raw".into(), f.pair.bulk_total());
    d.insert("attempts".into(), 1.0);
    d
}

/// The three-insertion field normalized to unit boundary length:
/// `(mu / nu(bd)^2, nu / nu(bd))` with weight `nu(bd)^{-2s/gamma}`. The part
/// `e^{-sS}` of the weight carried by the radial maximum is absorbed by
/// sampling `S` from the tilted law, so the recorded weight is
/// `(nu(bd) e^{-gamma S/2})^{-2s/gamma}`.
pub fn sample_hrv_direct(
    params: &GammaParams,
    points: &[Point; 3],
    res: &StripResolution,
    seed: u64,
) -> Result<DiskSample> {
    let frame = check_points(params, points, BoundsMode::UnitBoundary)?;
    let f = hrv_field(params, res, seed)?;
    let nu = f.pair.boundary_total();
    let s = three_point_s(params);
    let log_weight = -2.0 * s / params.gamma * (nu.ln() - 0.5 * params.gamma * f.radial.top);
    let map = strip_to_disk(ConformalMap::identity(Domain::Strip), frame);
    let measures = pushforward_measure(&f.pair.scaled(nu.powi(-2), 1.0 / nu), &map)?;
    Ok(DiskSample {
        measures,
        marked_points: *points,
        tag: ConstructionTag::Hrv,
        weight: log_weight.exp(),
        log_weight,
        diagnostics: hrv_diagnostics(&f, res.spacing()?),
    })
}

/// Unit-area variant: `(mu / mu(D), nu / mu(D)^{1/2})` with weight
/// `mu(D)^{-s/gamma}`, of which `e^{-sS}` is again absorbed by the tilt.
pub fn sample_hrv_unit_area(
    params: &GammaParams,
    points: &[Point; 3],
    res: &StripResolution,
    seed: u64,
) -> Result<DiskSample> {
    let frame = check_points(params, points, BoundsMode::UnitArea)?;
    let f = hrv_field(params, res, seed)?;
    let area = f.pair.bulk_total();
    let s = three_point_s(params);
    let log_weight = -s / params.gamma * (area.ln() - params.gamma * f.radial.top);
    let map = strip_to_disk(ConformalMap::identity(Domain::Strip), frame);
    let measures = pushforward_measure(&f.pair.scaled(1.0 / area, area.powf(-0.5)), &map)?;
    Ok(DiskSample {
        measures,
        marked_points: *points,
        tag: ConstructionTag::HrvUnitArea,
        weight: log_weight.exp(),
        log_weight,
        diagnostics: hrv_diagnostics(&f, res.spacing()?),
    })
}

/// Bessel-encoded disk at unit boundary length with a third boundary point
/// drawn from its boundary measure, embedded so that the third point goes to
/// `z2` and the ends of the strip to `z1`, `z3`.
pub fn sample_dms_direct(
    params: &GammaParams,
    points: &[Point; 3],
    res: &StripResolution,
    opts: &UnitBoundaryOptions,
    seed: u64,
) -> Result<DiskSample> {
    let frame = check_points(params, points, BoundsMode::UnitBoundary)?;
    let m = res.rows()?;
    let dt = PI / m as f64;
    let n_w = (res.window(params) / dt).ceil();
    let grid = Arc::new(Grid::strip(-n_w * dt, n_w * dt, m, false)?);
    let first = regenerate(params, &grid, seed, 0)?;
    let norm = normalize_unit_boundary(&first, params, opts, seed)?;
    let pair = GmcPair::from_field(&norm.field, params)?;
    let nu = pair.boundary_total();
    let u = rng::stream(seed, &[rng::MOD_DMS, 1]).random::<f64>() * nu;
    let omega = pick_by_mass(&boundary_in_order(&pair.boundary), u);
    let map = strip_to_disk(root_to_top(omega.pos), frame);
    let measures = pushforward_measure(&pair, &map)?;
    let mut d = BTreeMap::new();
    d.insert("attempts".into(), norm.attempts as f64);
    d.insert("nu_peak".into(), norm.nu_peak);
    d.insert("capped".into(), if norm.capped { 1.0 } else { 0.0 });
    d.insert("omega_quantile".into(), u / nu);
    d.insert("omega_t".into(), omega.pos.re);
    d.insert("omega_top".into(), if omega.pos.im > 0.5 * PI { 1.0 } else { 0.0 });
    d.insert("nu_raw".into(), nu);
    Ok(DiskSample {
        measures,
        marked_points: *points,
        tag: ConstructionTag::Dms,
        weight: norm.weight,
        log_weight: norm.weight.ln(),
        diagnostics: d,
    })
}
