//! The radial part of the Bessel-encoded disk: a two-sided path with its
//! maximum at 0, each side a Brownian motion of variance 2 per unit with drift
//! `-(Q - gamma)` conditioned to stay below the maximum. The conditioned sides
//! are sampled exactly at arbitrary times as minus the norm of a drifted 3d
//! Brownian motion.

use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, Exp, StandardNormal};

use crate::error::{LqgError, Result};
use crate::geometry::{Domain, GammaParams};
use crate::gff::strip::cached_strip_sampler;
use crate::gff::{radial_angular_decompose, Grid, GridField};
use crate::gmc::boundary_gmc;
use crate::rng;

/// `3 - 4 / gamma^2`.
pub fn bessel_dimension(params: &GammaParams) -> f64 {
    3.0 - 4.0 / (params.gamma * params.gamma)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExcursionPath {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub dimension: f64,
}

impl ExcursionPath {
    /// Linear interpolation; `None` outside the window.
    pub fn value_at(&self, t: f64) -> Option<f64> {
        let n = self.times.len();
        if n == 0 || t < self.times[0] - 1e-9 || t > self.times[n - 1] + 1e-9 {
            return None;
        }
        let k = self.times.partition_point(|s| *s <= t);
        if k == 0 {
            return Some(self.values[0]);
        }
        if k >= n {
            return Some(self.values[n - 1]);
        }
        let (t0, t1) = (self.times[k - 1], self.times[k]);
        let a = (t - t0) / (t1 - t0);
        Some(self.values[k - 1] * (1.0 - a) + self.values[k] * a)
    }
}

/// Brownian motion of variance 2 per unit with drift `mu > 0`, started at 0 and
/// conditioned to stay positive, at the increasing positive `times`.
pub fn conditioned_positive<R: Rng>(rng: &mut R, mu: f64, times: &[f64]) -> Vec<f64> {
    let mut x = [0.0f64; 3];
    let mut prev = 0.0;
    times
        .iter()
        .map(|&t| {
            let dt = t - prev;
            prev = t;
            let sd = (2.0 * dt).sqrt();
            for (c, xc) in x.iter_mut().enumerate() {
                let z: f64 = StandardNormal.sample(rng);
                *xc += sd * z + if c == 0 { mu * dt } else { 0.0 };
            }
            (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt()
        })
        .collect()
}

/// Values at `times` (which must contain 0) of a path with maximum 0 at time 0.
pub fn excursion_at<R: Rng>(params: &GammaParams, times: &[f64], rng: &mut R) -> Result<Vec<f64>> {
    let mu = params.drift();
    let zero = times
        .iter()
        .position(|t| t.abs() < 1e-12)
        .ok_or_else(|| LqgError::WindowMismatch("time 0 is not a sample time".into()))?;
    let right: Vec<f64> = times[zero + 1..].to_vec();
    let left: Vec<f64> = times[..zero].iter().rev().map(|t| -t).collect();
    let r = conditioned_positive(rng, mu, &right);
    let l = conditioned_positive(rng, mu, &left);
    let mut v = Vec::with_capacity(times.len());
    v.extend(l.iter().rev().map(|x| -x));
    v.push(0.0);
    v.extend(r.iter().map(|x| -x));
    Ok(v)
}

/// Path on `[-window, window]` with step `dt`.
pub fn sample_radial_excursion(params: &GammaParams, window: f64, dt: f64, seed: u64) -> Result<ExcursionPath> {
    if !(dt > 0.0 && window > 0.0 && dt <= window / 100.0) {
        return Err(LqgError::StepSize(format!(
            "dt = {dt} with window {window} (need dt <= window/100)"
        )));
    }
    let n = (window / dt).round() as i64;
    let times: Vec<f64> = (-n..=n).map(|k| k as f64 * dt).collect();
    let mut g = rng::stream(seed, &[rng::MOD_BESSEL_RADIAL]);
    let values = excursion_at(params, &times, &mut g)?;
    Ok(ExcursionPath {
        times,
        values,
        dimension: bessel_dimension(params),
    })
}

/// Radial part from `excursion` plus an independent angular part with zero line means.
pub fn build_dms_strip_field(excursion: &ExcursionPath, angular_seed: u64, grid: &Arc<Grid>) -> Result<GridField> {
    if grid.domain != Domain::Strip {
        return Err(LqgError::Domain(format!("strip field on {:?}", grid.domain)));
    }
    let sampler = cached_strip_sampler(grid.clone())?;
    let radial: Vec<f64> = (0..sampler.ncols)
        .map(|i| {
            let t = sampler.column_t(i);
            excursion
                .value_at(t)
                .ok_or_else(|| LqgError::WindowMismatch(format!("column {t} outside the excursion window")))
        })
        .collect::<Result<_>>()?;
    let mut g = rng::stream(angular_seed, &[rng::MOD_BESSEL_ANGULAR]);
    let angular = sampler.sample_angular(&mut g);
    Ok(GridField {
        grid: grid.clone(),
        values: sampler.assemble(&radial, &angular),
        meta: Some(sampler.meta.clone()),
        deterministic: None,
        flagged: Vec::new(),
    })
}

/// Translates a strip field so the column carrying the largest line mean sits at 0.
pub fn maximal_embedding(field: &GridField) -> Result<GridField> {
    if field.grid.domain != Domain::Strip {
        return Err(LqgError::Domain(format!(
            "maximal embedding on {:?}",
            field.grid.domain
        )));
    }
    let (radial, _) = radial_angular_decompose(field)?;
    let lat = field.grid.lattice.as_ref().expect("strip grids carry a lattice");
    let top = radial
        .iter()
        .enumerate()
        .fold(0, |best, (i, v)| if *v > radial[best] { i } else { best });
    if (lat.x0 + top as f64 * lat.hx).abs() < 1e-12 {
        return Ok(field.clone());
    }
    let m = lat.ny - 1;
    let lo = -(top as f64) * lat.hx;
    let hi = (lat.nx - 1 - top) as f64 * lat.hx;
    let grid = Arc::new(Grid::strip(lo, hi, m, false)?);
    debug_assert_eq!(grid.len(), field.grid.len());
    let mut out = field.clone();
    out.grid = grid;
    if let Some(meta) = &field.meta {
        let mut meta = (**meta).clone();
        meta.id = format!("{}|embedded", meta.id);
        out.meta = Some(Arc::new(meta));
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NormalizeMode {
    /// One attempt; the output carries the weight `nu_0^{2(Q - gamma)/gamma}`.
    Tilt,
    /// Accept-reject against a proposal for the level of the maximum.
    Rejection,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UnitBoundaryOptions {
    pub delta: f64,
    pub max_attempts: usize,
    pub mode: NormalizeMode,
    /// Largest boundary mass (with the maximum at 0) the rejection proposal
    /// treats exactly; heavier fields are accepted too rarely.
    pub nu_cap: f64,
}

impl Default for UnitBoundaryOptions {
    fn default() -> Self {
        UnitBoundaryOptions {
            delta: 0.3,
            max_attempts: 10_000,
            mode: NormalizeMode::Tilt,
            nu_cap: 20.0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Normalized {
    pub field: GridField,
    pub attempts: usize,
    /// Boundary mass of the accepted field before the final shift, maximum at 0.
    pub nu_peak: f64,
    pub weight: f64,
    /// Accepted fields whose mass exceeded `nu_cap`.
    pub capped: bool,
}

/// Fresh max-at-0 field on the columns of `grid`, attempt `attempt`.
pub fn regenerate(params: &GammaParams, grid: &Arc<Grid>, seed: u64, attempt: u64) -> Result<GridField> {
    let sampler = cached_strip_sampler(grid.clone())?;
    let times: Vec<f64> = (0..sampler.ncols).map(|i| sampler.column_t(i)).collect();
    let mut gr = rng::stream(seed, &[rng::MOD_BESSEL_RADIAL, attempt]);
    let radial = excursion_at(params, &times, &mut gr)?;
    let mut ga = rng::stream(seed, &[rng::MOD_BESSEL_ANGULAR, attempt]);
    let angular = sampler.sample_angular(&mut ga);
    Ok(GridField {
        grid: grid.clone(),
        values: sampler.assemble(&radial, &angular),
        meta: Some(sampler.meta.clone()),
        deterministic: None,
        flagged: Vec::new(),
    })
}

fn boundary_total(field: &GridField, params: &GammaParams) -> Result<f64> {
    Ok(boundary_gmc(field, params)?.iter().map(|c| c.mass).sum())
}

/// Brings a max-at-0 strip field to unit boundary length.
///
/// Rejection: the maximum's level `M` is proposed as `M_lo + Exp(Q - gamma)`
/// and the attempt is kept when `e^{gamma M/2} nu_0` falls in
/// `[e^{-gamma delta}, e^{gamma delta}]`, regenerating the field otherwise.
/// The kept field is then shifted by `-(2/gamma) log nu_0`.
pub fn normalize_unit_boundary(
    field: &GridField,
    params: &GammaParams,
    opts: &UnitBoundaryOptions,
    seed: u64,
) -> Result<Normalized> {
    let g = params.gamma;
    let mu = params.drift();
    match opts.mode {
        NormalizeMode::Tilt => {
            let nu = boundary_total(field, params)?;
            Ok(Normalized {
                field: field.shifted(-2.0 / g * nu.ln()),
                attempts: 1,
                nu_peak: nu,
                weight: nu.powf(2.0 * mu / g),
                capped: false,
            })
        }
        NormalizeMode::Rejection => {
            let m_lo = -2.0 / g * opts.nu_cap.ln() - 2.0 * opts.delta;
            let exp = Exp::new(mu).map_err(|e| LqgError::Config(e.to_string()))?;
            let mut level = rng::stream(seed, &[rng::MOD_DMS, 0x6c76]);
            let mut chance = 0.0;
            for attempt in 0..opts.max_attempts {
                let f = if attempt == 0 {
                    field.clone()
                } else {
                    regenerate(params, &field.grid, seed, attempt as u64)?
                };
                let nu = boundary_total(&f, params)?;
                let c = -2.0 / g * nu.ln();
                let lo = (c - 2.0 * opts.delta - m_lo).max(0.0);
                let hi = (c + 2.0 * opts.delta - m_lo).max(0.0);
                chance += (-mu * lo).exp() - (-mu * hi).exp();
                let m = m_lo + exp.sample(&mut level);
                if (m + 2.0 / g * nu.ln()).abs() <= 2.0 * opts.delta {
                    return Ok(Normalized {
                        field: f.shifted(-2.0 / g * nu.ln()),
                        attempts: attempt + 1,
                        nu_peak: nu,
                        weight: 1.0,
                        capped: nu > opts.nu_cap,
                    });
                }
            }
            Err(LqgError::MaxAttemptsExceeded {
                attempts: opts.max_attempts,
                rate: chance / opts.max_attempts.max(1) as f64,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gff::radial_angular_decompose;

    #[test]
    fn dimension_examples() {
        let d = |g: f64| bessel_dimension(&GammaParams::new(g).unwrap());
        assert!((d(2f64.sqrt()) - 1.0).abs() < 1e-12);
        assert!((d((8.0f64 / 3.0).sqrt()) - 1.5).abs() < 1e-12);
        assert!((d(2.0 - 1e-9) - 2.0).abs() < 1e-8);
    }

    #[test]
    fn step_size_is_checked() {
        let p = GammaParams::new(1.5).unwrap();
        assert!(matches!(
            sample_radial_excursion(&p, 1.0, 0.1, 1),
            Err(LqgError::StepSize(_))
        ));
    }

    #[test]
    fn path_has_strict_maximum_at_zero() {
        let p = GammaParams::new(1.5).unwrap();
        for seed in 0..5 {
            let e = sample_radial_excursion(&p, 5.0, 0.01, seed).unwrap();
            let zero = e.times.iter().position(|t| t.abs() < 1e-12).unwrap();
            assert_eq!(e.values[zero], 0.0);
            assert!(e.values.iter().enumerate().all(|(k, v)| k == zero || *v < 0.0));
        }
    }

    #[test]
    fn quadratic_variation_per_unit_time() {
        let p = GammaParams::new(1.5).unwrap();
        let e = sample_radial_excursion(&p, 20.0, 1e-3, 3).unwrap();
        let qv: f64 = e.values.windows(2).map(|w| (w[1] - w[0]).powi(2)).sum();
        let rate = qv / 40.0;
        assert!((1.9..=2.1).contains(&rate), "{rate}");
    }

    #[test]
    fn strip_field_line_means_follow_the_excursion() {
        let p = GammaParams::new(1.2).unwrap();
        let e = sample_radial_excursion(&p, 6.0, 0.01, 4).unwrap();
        let grid = Arc::new(Grid::strip(-4.0, 4.0, 8, false).unwrap());
        let f = build_dms_strip_field(&e, 9, &grid).unwrap();
        let (radial, _) = radial_angular_decompose(&f).unwrap();
        let lat = grid.lattice.as_ref().unwrap();
        for (i, r) in radial.iter().enumerate() {
            let t = lat.x0 + i as f64 * lat.hx;
            assert!((r - e.value_at(t).unwrap()).abs() < 1e-9);
        }
        let e2 = sample_radial_excursion(&p, 6.0, 0.01, 5).unwrap();
        let f2 = build_dms_strip_field(&e2, 9, &grid).unwrap();
        let (_, a1) = radial_angular_decompose(&f).unwrap();
        let (_, a2) = radial_angular_decompose(&f2).unwrap();
        for (x, y) in a1.values.iter().zip(&a2.values) {
            assert!((x - y).abs() < 1e-12);
        }
        let wide = Arc::new(Grid::strip(-8.0, 4.0, 8, false).unwrap());
        assert!(matches!(
            build_dms_strip_field(&e, 9, &wide),
            Err(LqgError::WindowMismatch(_))
        ));
    }

    #[test]
    fn embedding_is_idempotent_and_translation_invariant() {
        let p = GammaParams::new(1.2).unwrap();
        let e = sample_radial_excursion(&p, 8.0, 0.01, 6).unwrap();
        let grid = Arc::new(Grid::strip(-3.0, 5.0, 8, false).unwrap());
        let f = build_dms_strip_field(&e, 1, &grid).unwrap();
        let a = maximal_embedding(&f).unwrap();
        let b = maximal_embedding(&a).unwrap();
        assert_eq!(a.values, b.values);
        assert_eq!(a.grid.nodes, b.grid.nodes);
        let (radial, _) = radial_angular_decompose(&a).unwrap();
        let top = radial
            .iter()
            .enumerate()
            .fold(0, |k, (i, v)| if *v > radial[k] { i } else { k });
        assert_eq!(a.grid.nodes[top * 9].re, 0.0);
        let mut shifted = f.clone();
        shifted.grid = Arc::new(Grid::strip(0.0, 8.0, 8, false).unwrap());
        let c = maximal_embedding(&shifted).unwrap();
        assert_eq!(c.values, a.values);
        for (x, y) in c.grid.nodes.iter().zip(&a.grid.nodes) {
            assert!((x - y).norm() < 1e-12);
        }
    }
}
