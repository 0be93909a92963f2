//! Exact-covariance sampling by dense factorization of the kernel matrix.

use std::cell::RefCell;
use std::ops::Range;
use std::sync::{Arc, Mutex, OnceLock};

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use super::{CovMeta, Grid, GridField};
use crate::error::{LqgError, Result};
use crate::geometry::Domain;
use crate::green::{self, BackgroundMeasure, BoundaryCondition, GreenKernel, RhoKernel};
use crate::linalg::{factor_psd, Factor};
use crate::rng;

pub const DEFAULT_MAX_NODES: usize = 1 << 14;

/// Columns per BLAS call when sampling in batches.
const BATCH: usize = 128;

pub struct DenseSampler {
    pub grid: Arc<Grid>,
    pub kernel: GreenKernel,
    pub rho: Option<RhoKernel>,
    /// Linear functional `p` with `p . h = 0` enforced on every sample.
    pub pin: Option<Vec<f64>>,
    pub factor: Factor,
    pub meta: Arc<CovMeta>,
}

fn kernel_for(domain: Domain, bc: BoundaryCondition) -> Result<GreenKernel> {
    match (domain, bc) {
        (Domain::UnitDisk, BoundaryCondition::Dirichlet) => Ok(GreenKernel::disk_dirichlet()),
        (Domain::UnitDisk, BoundaryCondition::Neumann) => Ok(GreenKernel::disk_neumann()),
        (Domain::HalfDisk { radius }, BoundaryCondition::Mixed) => Ok(GreenKernel::halfdisk(radius)),
        (d, b) => Err(LqgError::Domain(format!("no dense kernel for {b:?} on {d:?}"))),
    }
}

/// `p` such that `p . h` is the rho-average of the interpolated field.
pub fn pin_from_measure(grid: &Grid, rho: &BackgroundMeasure) -> Result<Vec<f64>> {
    let mut p = vec![0.0; grid.len()];
    for (z, w) in rho.nodes.iter().zip(&rho.weights) {
        let s = grid.interp_stencil(*z);
        if s.is_empty() {
            return Err(LqgError::Geometry(format!("measure node {z} not covered by the grid")));
        }
        for (k, c) in s {
            p[k] += w * c;
        }
    }
    let total: f64 = p.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(LqgError::Geometry(format!(
            "measure reaches zero boundary values (mass {total} on nodes)"
        )));
    }
    Ok(p)
}

impl DenseSampler {
    pub fn new(
        grid: Arc<Grid>,
        bc: BoundaryCondition,
        rho: Option<BackgroundMeasure>,
        pin: Option<Vec<f64>>,
        max_nodes: usize,
    ) -> Result<DenseSampler> {
        let n = grid.len();
        if n > max_nodes {
            return Err(LqgError::Size {
                nodes: n,
                limit: max_nodes,
            });
        }
        let kernel = kernel_for(grid.domain, bc)?;
        match bc {
            BoundaryCondition::Dirichlet if grid.edge.iter().any(|e| *e > 0.0) => {
                return Err(LqgError::Geometry(
                    "zero boundary field on a grid with free edges".into(),
                ))
            }
            BoundaryCondition::Neumann if grid.circle.is_none() => {
                return Err(LqgError::Geometry("free field needs boundary nodes".into()))
            }
            BoundaryCondition::Neumann if rho.is_none() => {
                return Err(LqgError::Config(
                    "a free field needs a background measure to pin its constant".into(),
                ))
            }
            _ => {}
        }
        let rho = rho.map(|r| RhoKernel::new(kernel, r)).transpose()?;
        let pin = match (pin, &rho) {
            (Some(p), _) => Some(p),
            (None, Some(r)) => Some(pin_from_measure(&grid, &r.rho)?),
            (None, None) => None,
        };
        let theta = rho.as_ref().map(|r| r.theta).unwrap_or(0.0);
        let mean_at = |z| -> Result<f64> { rho.as_ref().map(|r| r.mean(z)).unwrap_or(Ok(0.0)) };
        let m: Vec<f64> = grid.nodes.par_iter().map(|z| mean_at(*z)).collect::<Result<_>>()?;
        let m_ref: Vec<f64> = (0..n)
            .into_par_iter()
            .map(|k| {
                if grid.bulk_ref[k] == grid.nodes[k] {
                    Ok(m[k])
                } else {
                    mean_at(grid.bulk_ref[k])
                }
            })
            .collect::<Result<_>>()?;
        let kb = green::self_energy_bulk();
        let kd = green::self_energy_boundary();
        let h = grid.spacing;
        let mut bulk_diag = vec![0.0; n];
        let mut bdry_diag = vec![f64::NAN; n];
        let mut diag = vec![0.0; n];
        for k in 0..n {
            bulk_diag[k] = kernel.regularized_diagonal(grid.bulk_ref[k]) - 2.0 * m_ref[k] + theta;
            if grid.is_free(k) {
                let b = kernel.boundary_diagonal(grid.nodes[k]).ok_or_else(|| {
                    LqgError::Geometry(format!("free edge at {} off the free boundary", grid.nodes[k]))
                })?;
                bdry_diag[k] = b - 2.0 * m[k] + theta;
                diag[k] = bdry_diag[k] - 2.0 * grid.edge[k].ln() + kd;
            } else {
                diag[k] = kernel.regularized_diagonal(grid.nodes[k]) - 2.0 * m[k] + theta - h.ln() + kb;
            }
        }
        let nodes = &grid.nodes;
        let entries = |shift: f64| {
            let mut c = vec![0.0; n * n];
            c.par_chunks_mut(n).enumerate().for_each(|(j, col)| {
                let xj = nodes[j];
                for i in 0..n {
                    col[i] = shift
                        + if i == j {
                            diag[j]
                        } else {
                            kernel.eval_raw(nodes[i], xj) - m[i] - m[j] + theta
                        };
                }
            });
            c
        };
        let first = entries(0.0);
        let variance = match &pin {
            None => diag.clone(),
            Some(p) => {
                let cp: Vec<f64> = first
                    .par_chunks(n)
                    .map(|col| col.iter().zip(p).map(|(a, b)| a * b).sum())
                    .collect();
                let pcp: f64 = cp.iter().zip(p).map(|(a, b)| a * b).sum();
                (0..n).map(|i| diag[i] - 2.0 * cp[i] + pcp).collect()
            }
        };
        // Pinned samples only see the projection of the matrix, which ignores a
        // constant added to every entry; the constant makes the direction of
        // constants positive before factoring (node sampling of a mean-zero
        // kernel can leave it slightly negative).
        let shift = if pin.is_some() {
            diag.iter().cloned().fold(0.0, f64::max)
        } else {
            0.0
        };
        let build = || entries(shift);
        let slot = RefCell::new(Some(if shift != 0.0 {
            let mut c = first;
            c.iter_mut().for_each(|v| *v += shift);
            c
        } else {
            first
        }));
        let factor = factor_psd(|| slot.borrow_mut().take().unwrap_or_else(build), n)?;
        let id = format!(
            "{}|{:?}|{}|{}",
            grid.id,
            kernel.kind,
            rho.as_ref()
                .map(|r| format!("{:?}:{}", r.rho.kind, r.rho.nodes.len()))
                .unwrap_or_else(|| "none".into()),
            pin.as_ref()
                .map(|p| format!(
                    "{:.6e}",
                    p.iter().enumerate().map(|(i, x)| x * (i as f64 + 1.0)).sum::<f64>()
                ))
                .unwrap_or_default()
        );
        let variance = if factor.clipped > 0.0 && pin.is_none() {
            factor.variances()
        } else {
            variance
        };
        let meta = Arc::new(CovMeta {
            id,
            variance,
            bulk_diag,
            bdry_diag,
        });
        Ok(DenseSampler {
            grid,
            kernel,
            rho,
            pin,
            factor,
            meta,
        })
    }

    pub fn sample(&self, seed: u64, replica: u64) -> GridField {
        self.sample_batch(seed, replica..replica + 1).pop().expect("one sample")
    }

    /// Replica `r` always uses the stream `(seed, GFF, r)`, whatever the batching.
    pub fn sample_batch(&self, seed: u64, replicas: Range<u64>) -> Vec<GridField> {
        let n = self.grid.len();
        let ids: Vec<u64> = replicas.collect();
        let mut out = Vec::with_capacity(ids.len());
        for chunk in ids.chunks(BATCH) {
            let m = chunk.len();
            let mut z = vec![0.0; n * m];
            z.par_chunks_mut(n).zip(chunk.par_iter()).for_each(|(col, &r)| {
                let mut g = rng::stream(seed, &[rng::MOD_GFF, r]);
                col.iter_mut().for_each(|v| *v = StandardNormal.sample(&mut g));
            });
            self.factor.apply(&mut z, m);
            for col in z.chunks(n) {
                let mut values = col.to_vec();
                if let Some(p) = &self.pin {
                    let mean: f64 = values.iter().zip(p).map(|(a, b)| a * b).sum();
                    values.iter_mut().for_each(|v| *v -= mean);
                }
                out.push(GridField {
                    grid: self.grid.clone(),
                    values,
                    meta: Some(self.meta.clone()),
                    deterministic: None,
                    flagged: Vec::new(),
                });
            }
        }
        out
    }
}

type CacheEntry = (String, Arc<DenseSampler>);

fn cache() -> &'static Mutex<Vec<CacheEntry>> {
    static C: OnceLock<Mutex<Vec<CacheEntry>>> = OnceLock::new();
    C.get_or_init(|| Mutex::new(Vec::new()))
}

/// Matrix entries kept alive across cached factorizations.
const CACHE_BUDGET: usize = 260_000_000;

/// Factorizations are built once per `(grid, boundary condition, measure, pin)`
/// and shared read-only.
pub fn cached_sampler(
    grid: Arc<Grid>,
    bc: BoundaryCondition,
    rho: Option<BackgroundMeasure>,
    pin: Option<Vec<f64>>,
    key_extra: &str,
) -> Result<Arc<DenseSampler>> {
    let key = format!(
        "{}|{bc:?}|{}|{key_extra}",
        grid.id,
        rho.as_ref()
            .map(|r| format!("{:?}:{}:{:?}", r.kind, r.nodes.len(), r.domain))
            .unwrap_or_else(|| "none".into())
    );
    let mut c = cache().lock().unwrap_or_else(|e| e.into_inner());
    if let Some((_, s)) = c.iter().find(|(k, _)| *k == key) {
        return Ok(s.clone());
    }
    let n = grid.len();
    let held: usize = c.iter().map(|(_, s)| s.grid.len() * s.grid.len()).sum();
    if held + n * n > CACHE_BUDGET {
        c.clear();
    }
    let s = Arc::new(DenseSampler::new(grid, bc, rho, pin, DEFAULT_MAX_NODES)?);
    c.push((key, s.clone()));
    Ok(s)
}

/// Drops every cached factorization.
pub fn clear_cache() {
    cache().lock().unwrap_or_else(|e| e.into_inner()).clear();
}
