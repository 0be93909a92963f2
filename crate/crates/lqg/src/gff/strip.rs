//! Free-boundary GFF on strip lattices through its cosine-mode expansion
//! `h = X_0(t) + sum_k X_k(t) cos(k y)`. Each mode is an exact Gauss-Markov
//! process in `t`: Brownian motion with variance 2 per unit for `k = 0`,
//! Ornstein-Uhlenbeck with stationary variance `2/k` and rate `k` otherwise.
//! A zero boundary condition at the left edge `t0` starts every mode at 0.

use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{CovMeta, Grid};
use crate::error::{LqgError, Result};
use crate::geometry::Domain;

pub struct StripSampler {
    pub grid: Arc<Grid>,
    /// rows are `y_j = j pi / m`, `j = 0..=m`
    pub m: usize,
    pub ncols: usize,
    pub dt: f64,
    /// first column abscissa
    pub t_first: f64,
    /// left edge carrying zero boundary values, if any
    pub t0: Option<f64>,
    /// `cos(k y_j)` at `[j * m + (k - 1)]`
    cosines: Vec<f64>,
    /// Angular part only: variance and regularized diagonals.
    pub meta: Arc<CovMeta>,
}

/// `-log(2 sin y)`, minus the image terms of a zero left edge at distance `s`.
pub fn angular_bulk_diagonal(y: f64, s: Option<f64>) -> f64 {
    let mut v = -(2.0 * y.sin()).ln();
    if let Some(s) = s {
        let q = (-2.0 * s).exp();
        v += (1.0 - q).ln()
            + num_complex::Complex64::new(1.0 - q * (2.0 * y).cos(), -q * (2.0 * y).sin())
                .norm()
                .ln();
    }
    v
}

/// Boundary counterpart: 0 on the full strip, `2 log(1 - e^{-2s})` with a zero edge at distance `s`.
pub fn angular_boundary_diagonal(s: Option<f64>) -> f64 {
    s.map(|s| 2.0 * (1.0 - (-2.0 * s).exp()).ln()).unwrap_or(0.0)
}

impl StripSampler {
    pub fn new(grid: Arc<Grid>) -> Result<StripSampler> {
        let lat = grid
            .lattice
            .as_ref()
            .ok_or_else(|| LqgError::Domain("strip sampler needs a lattice".into()))?;
        let t0 = match grid.domain {
            Domain::Strip => None,
            Domain::HalfStrip { left } => Some(left),
            d => return Err(LqgError::Domain(format!("strip sampler on {d:?}"))),
        };
        let m = lat.ny - 1;
        let ncols = lat.nx;
        let dt = lat.hx;
        let mut cosines = vec![0.0; (m + 1) * m];
        for j in 0..=m {
            for k in 1..=m {
                cosines[j * m + k - 1] = (k as f64 * j as f64 * PI / m as f64).cos();
            }
        }
        let mut variance = vec![0.0; grid.len()];
        let mut bulk_diag = vec![0.0; grid.len()];
        let mut bdry_diag = vec![f64::NAN; grid.len()];
        // without an edge every column carries the same row profile
        let mut row_var = vec![0.0; m + 1];
        let mut row_bulk = vec![0.0; m + 1];
        if t0.is_none() {
            for j in 0..=m {
                row_var[j] = (1..=m).map(|k| 2.0 / k as f64 * cosines[j * m + k - 1].powi(2)).sum();
                row_bulk[j] = angular_bulk_diagonal(grid.bulk_ref[j].im, None);
            }
        }
        for i in 0..ncols {
            let t = lat.x0 + i as f64 * dt;
            let s = t0.map(|a| t - a);
            for j in 0..=m {
                let node = i * (m + 1) + j;
                if s.is_none() {
                    variance[node] = row_var[j];
                    bulk_diag[node] = row_bulk[j];
                } else {
                    let mut v = 0.0;
                    for k in 1..=m {
                        let c = cosines[j * m + k - 1];
                        v += mode_cov(k, t, t, t0) * c * c;
                    }
                    variance[node] = v;
                    bulk_diag[node] = angular_bulk_diagonal(grid.bulk_ref[node].im, s);
                }
                if j == 0 || j == m {
                    bdry_diag[node] = angular_boundary_diagonal(s);
                }
            }
        }
        let meta = Arc::new(CovMeta {
            id: format!("{}|modes", grid.id),
            variance,
            bulk_diag,
            bdry_diag,
        });
        Ok(StripSampler {
            m,
            ncols,
            dt,
            t_first: lat.x0,
            t0,
            cosines,
            meta,
            grid,
        })
    }

    pub fn column_t(&self, i: usize) -> f64 {
        self.t_first + i as f64 * self.dt
    }

    /// Angular part at every node (modes `1..=m`).
    pub fn sample_angular<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        let m = self.m;
        let mut x = vec![0.0; m];
        let mut out = vec![0.0; self.grid.len()];
        for i in 0..self.ncols {
            for k in 1..=m {
                let kk = k as f64;
                let z: f64 = StandardNormal.sample(rng);
                x[k - 1] = if i == 0 {
                    match self.t0 {
                        None => (2.0 / kk).sqrt() * z,
                        Some(a) => {
                            let s = self.column_t(0) - a;
                            (2.0 / kk * (1.0 - (-2.0 * kk * s).exp())).sqrt() * z
                        }
                    }
                } else {
                    let r = (-kk * self.dt).exp();
                    r * x[k - 1] + (2.0 / kk * (1.0 - r * r)).sqrt() * z
                };
            }
            for j in 0..=m {
                let row = &self.cosines[j * m..(j + 1) * m];
                out[i * (m + 1) + j] = row.iter().zip(&x).map(|(c, v)| c * v).sum();
            }
        }
        out
    }

    /// Zero mode from the left edge: `sqrt(2) B(t - t0)` at every column.
    pub fn sample_radial_from_edge<R: Rng>(&self, rng: &mut R) -> Result<Vec<f64>> {
        let a = self
            .t0
            .ok_or_else(|| LqgError::Domain("radial part from an edge needs a half-strip".into()))?;
        let mut v = Vec::with_capacity(self.ncols);
        let mut cur = 0.0;
        let mut prev = a;
        for i in 0..self.ncols {
            let t = self.column_t(i);
            let z: f64 = StandardNormal.sample(rng);
            cur += (2.0 * (t - prev)).sqrt() * z;
            prev = t;
            v.push(cur);
        }
        Ok(v)
    }

    /// `radial(t_i) + angular` at every node.
    pub fn assemble(&self, radial: &[f64], angular: &[f64]) -> Vec<f64> {
        let ny = self.m + 1;
        angular.iter().enumerate().map(|(k, a)| a + radial[k / ny]).collect()
    }

    /// Lattice covariance of the angular part with the angular part at `node`.
    pub fn angular_covariance_column(&self, node: usize) -> Vec<f64> {
        let m = self.m;
        let ny = m + 1;
        let (i0, j0) = (node / ny, node % ny);
        let t_ref = self.column_t(i0);
        let mut out = vec![0.0; self.grid.len()];
        let mut coef = vec![0.0; m];
        for i in 0..self.ncols {
            let t = self.column_t(i);
            for k in 1..=m {
                coef[k - 1] = mode_cov(k, t, t_ref, self.t0) * self.cosines[j0 * m + k - 1];
            }
            for j in 0..=m {
                let row = &self.cosines[j * m..(j + 1) * m];
                out[i * ny + j] = row.iter().zip(&coef).map(|(c, v)| c * v).sum();
            }
        }
        out
    }

    /// Covariance of the zero mode between columns (only with a left edge).
    pub fn radial_covariance(&self, t: f64, s: f64) -> f64 {
        match self.t0 {
            Some(a) => 2.0 * (t.min(s) - a).max(0.0),
            None => 0.0,
        }
    }
}

/// Samplers shared by every field on the same grid (keeps the last few).
pub fn cached_strip_sampler(grid: Arc<Grid>) -> Result<Arc<StripSampler>> {
    static C: OnceLock<Mutex<Vec<Arc<StripSampler>>>> = OnceLock::new();
    let cache = C.get_or_init(|| Mutex::new(Vec::new()));
    if let Some(s) = cache
        .lock()
        .unwrap_or_else(|e| e.into_inner())
        .iter()
        .find(|s| s.grid.id == grid.id)
    {
        return Ok(s.clone());
    }
    let s = Arc::new(StripSampler::new(grid)?);
    let mut c = cache.lock().unwrap_or_else(|e| e.into_inner());
    if c.len() >= 8 {
        c.remove(0);
    }
    c.push(s.clone());
    Ok(s)
}

fn mode_cov(k: usize, t: f64, s: f64, t0: Option<f64>) -> f64 {
    let kk = k as f64;
    let mut c = (-kk * (t - s).abs()).exp();
    if let Some(a) = t0 {
        c -= (-kk * (t + s - 2.0 * a)).exp();
    }
    2.0 / kk * c
}
