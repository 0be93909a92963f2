//! Bulk and boundary chaos measures of lattice fields, region masses,
//! Seiberg-type bounds and moment estimates.

use std::f64::consts::PI;

use rand::Rng;

use crate::error::{LqgError, Result};
use crate::geometry::{Domain, GammaParams, Point};
use crate::gff::{GridField, InsertionSet};
use crate::rng;

/// A point mass of a discretized measure.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Cell {
    pub pos: Point,
    pub mass: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GmcPair {
    pub domain: Domain,
    pub bulk: Vec<Cell>,
    pub boundary: Vec<Cell>,
    pub gamma: f64,
    pub field_ref: String,
}

impl GmcPair {
    pub fn from_field(field: &GridField, params: &GammaParams) -> Result<GmcPair> {
        let bulk = bulk_gmc(field, params)?;
        let boundary = boundary_gmc(field, params)?;
        Ok(GmcPair {
            domain: field.grid.domain,
            bulk,
            boundary,
            gamma: params.gamma,
            field_ref: field.meta.as_ref().map(|m| m.id.clone()).unwrap_or_default(),
        })
    }

    pub fn bulk_total(&self) -> f64 {
        self.bulk.iter().map(|c| c.mass).sum()
    }

    pub fn boundary_total(&self) -> f64 {
        self.boundary.iter().map(|c| c.mass).sum()
    }

    /// Same pair with bulk masses times `a` and boundary masses times `b`.
    pub fn scaled(&self, a: f64, b: f64) -> GmcPair {
        let mut out = self.clone();
        out.bulk.iter_mut().for_each(|c| c.mass *= a);
        out.boundary.iter_mut().for_each(|c| c.mass *= b);
        out
    }
}

/// `area exp(gamma h - gamma^2/2 Var h + gamma^2/2 G~)` per cell.
pub fn bulk_gmc(field: &GridField, params: &GammaParams) -> Result<Vec<Cell>> {
    let meta = field.meta.as_ref().ok_or(LqgError::MissingCovarianceMetadata)?;
    let g = params.gamma;
    let grid = &field.grid;
    Ok((0..grid.len())
        .filter(|&k| grid.area[k] > 0.0)
        .map(|k| {
            let e = g * field.values[k] - 0.5 * g * g * meta.variance[k] + 0.5 * g * g * meta.bulk_diag[k];
            Cell {
                pos: grid.nodes[k],
                mass: grid.area[k] * e.exp(),
            }
        })
        .collect())
}

/// `edge exp(gamma/2 h - gamma^2/8 Var h + gamma^2/8 G~_bdry)` per free edge.
pub fn boundary_gmc(field: &GridField, params: &GammaParams) -> Result<Vec<Cell>> {
    let meta = field.meta.as_ref().ok_or(LqgError::MissingCovarianceMetadata)?;
    let g = params.gamma;
    let grid = &field.grid;
    let cells: Vec<Cell> = (0..grid.len())
        .filter(|&k| grid.edge[k] > 0.0)
        .map(|k| {
            let e = 0.5 * g * field.values[k] - 0.125 * g * g * meta.variance[k] + 0.125 * g * g * meta.bdry_diag[k];
            Cell {
                pos: grid.nodes[k],
                mass: grid.edge[k] * e.exp(),
            }
        })
        .collect();
    if cells.is_empty() {
        return Err(LqgError::NoFreeBoundary);
    }
    Ok(cells)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Region {
    /// All bulk cells.
    WholeBulk,
    /// All boundary edges.
    WholeBoundary,
    /// Bulk cells with centers in the open ball.
    Ball { center: Point, radius: f64 },
    /// Boundary edges on the unit circle with argument in `[from, to)`, taken mod 2 pi.
    AngleArc { from: f64, to: f64 },
    /// Boundary edges at height `level` with real part in `[lo, hi)`.
    Segment { level: f64, lo: f64, hi: f64 },
}

impl Region {
    fn contains(&self, z: Point) -> bool {
        match *self {
            Region::WholeBulk | Region::WholeBoundary => true,
            Region::Ball { center, radius } => (z - center).norm() < radius,
            Region::AngleArc { from, to } => {
                let span = (to - from).rem_euclid(2.0 * PI);
                let span = if span == 0.0 && to != from { 2.0 * PI } else { span };
                (z.arg() - from).rem_euclid(2.0 * PI) < span
            }
            Region::Segment { level, lo, hi } => (z.im - level).abs() < 1e-9 && z.re >= lo && z.re < hi,
        }
    }

    fn on_boundary(&self) -> bool {
        matches!(
            self,
            Region::WholeBoundary | Region::AngleArc { .. } | Region::Segment { .. }
        )
    }
}

/// Mass of the cells (ball, whole bulk) or edges (arcs, whole boundary) whose
/// centers lie in `region`.
pub fn region_mass(measure: &GmcPair, region: &Region) -> f64 {
    let cells = if region.on_boundary() {
        &measure.boundary
    } else {
        &measure.bulk
    };
    cells.iter().filter(|c| region.contains(c.pos)).map(|c| c.mass).sum()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BoundsMode {
    Strict,
    UnitBoundary,
    UnitArea,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BoundsVerdict {
    pub pass: bool,
    pub reasons: Vec<String>,
}

pub fn check_insertion_bounds(ins: &InsertionSet, params: &GammaParams, mode: BoundsMode) -> BoundsVerdict {
    let q = params.q;
    let s = ins.s(params);
    let mut reasons = Vec::new();
    if mode != BoundsMode::UnitBoundary {
        for (i, (a, _)) in ins.bulk.iter().enumerate() {
            if !(*a < q) {
                reasons.push(format!("α_i < Q violated (i={i}, α={a}, Q={q})"));
            }
        }
    }
    for (j, (b, _)) in ins.boundary.iter().enumerate() {
        if !(*b < q) {
            reasons.push(format!("β_j < Q violated (j={j}, β={b}, Q={q})"));
        }
    }
    match mode {
        BoundsMode::Strict => {
            if !(s > 0.0) {
                reasons.push(format!("s > 0 violated (s={s})"));
            }
        }
        BoundsMode::UnitBoundary | BoundsMode::UnitArea => {
            let mut bound = 2.0 / params.gamma;
            if mode == BoundsMode::UnitArea {
                for (a, _) in &ins.bulk {
                    bound = bound.min(2.0 * (q - a));
                }
            }
            for (b, _) in &ins.boundary {
                bound = bound.min(q - b);
            }
            if !(-s < bound) {
                reasons.push(format!("-s < {bound} violated (s={s})"));
            }
        }
    }
    BoundsVerdict {
        pass: reasons.is_empty(),
        reasons,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MomentEstimate {
    pub q: f64,
    pub n: usize,
    pub estimate: f64,
    /// Bootstrap 95% percentile interval.
    pub ci: (f64, f64),
    pub std_error: f64,
    pub warning: Option<String>,
}

pub const BOOTSTRAP_RESAMPLES: usize = 1000;

/// Empirical `E[X^q]` with a 1000-resample percentile bootstrap interval.
/// `threshold` is the largest exponent with a finite moment, when known.
pub fn moment_estimate(samples: &[f64], q: f64, threshold: Option<f64>, seed: u64) -> Result<MomentEstimate> {
    weighted_moment_estimate(samples, None, q, threshold, seed)
}

/// Self-normalized weighted version of [`moment_estimate`].
pub fn weighted_moment_estimate(
    samples: &[f64],
    weights: Option<&[f64]>,
    q: f64,
    threshold: Option<f64>,
    seed: u64,
) -> Result<MomentEstimate> {
    let n = samples.len();
    if n == 0 {
        return Err(LqgError::EmptySample);
    }
    let w: Vec<f64> = weights.map(|w| w.to_vec()).unwrap_or_else(|| vec![1.0; n]);
    let pw: Vec<f64> = samples.iter().map(|x| if q == 0.0 { 1.0 } else { x.powf(q) }).collect();
    let est = |idx: &mut dyn Iterator<Item = usize>| {
        let (mut a, mut b) = (0.0, 0.0);
        for i in idx {
            a += w[i] * pw[i];
            b += w[i];
        }
        a / b
    };
    let estimate = est(&mut (0..n));
    let mut g = rng::stream(seed, &[rng::MOD_HARNESS, 0x6d6f6d]);
    let mut boots: Vec<f64> = (0..BOOTSTRAP_RESAMPLES)
        .map(|_| {
            let idx: Vec<usize> = (0..n).map(|_| g.random_range(0..n)).collect();
            est(&mut idx.into_iter())
        })
        .collect();
    boots.sort_by(|a, b| a.total_cmp(b));
    let lo = boots[(0.025 * BOOTSTRAP_RESAMPLES as f64) as usize];
    let hi = boots[(0.975 * BOOTSTRAP_RESAMPLES as f64) as usize - 1];
    let mean_b = boots.iter().sum::<f64>() / boots.len() as f64;
    let std_error = (boots.iter().map(|b| (b - mean_b).powi(2)).sum::<f64>() / (boots.len() - 1) as f64).sqrt();
    let warning = threshold
        .filter(|t| q >= *t)
        .map(|t| format!("q = {q} is not below the finite-moment threshold {t}"));
    Ok(MomentEstimate {
        q,
        n,
        estimate,
        ci: (lo.min(estimate), hi.max(estimate)),
        std_error,
        warning,
    })
}

/// `(2/gamma)(Q - gamma)`: boundary-mass moments below it are finite.
pub fn moment_threshold(params: &GammaParams) -> f64 {
    2.0 / params.gamma * (params.q - params.gamma)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{pt, I};
    use crate::gff::{Grid, GridField};
    use crate::green::{BackgroundMeasure, BoundaryCondition};
    use proptest::prelude::*;
    use std::sync::Arc;

    fn neumann_field(seed: u64) -> GridField {
        let g = Arc::new(Grid::disk(13, true).unwrap());
        crate::gff::sample_gff(
            &g,
            BoundaryCondition::Neumann,
            Some(&BackgroundMeasure::uniform_boundary_disk(512)),
            seed,
        )
        .unwrap()
    }

    #[test]
    fn shift_rules_are_exact() {
        let f = neumann_field(1);
        let p = GammaParams::new(1.3).unwrap();
        let a = GmcPair::from_field(&f, &p).unwrap();
        let b = GmcPair::from_field(&f.shifted(0.7), &p).unwrap();
        for (x, y) in a.bulk.iter().zip(&b.bulk) {
            assert!((y.mass / x.mass - (1.3f64 * 0.7).exp()).abs() < 1e-12);
        }
        for (x, y) in a.boundary.iter().zip(&b.boundary) {
            assert!((y.mass / x.mass - (0.65f64 * 0.7).exp()).abs() < 1e-12);
        }
    }

    #[test]
    fn small_gamma_gives_lebesgue() {
        let f = neumann_field(2);
        let p = GammaParams::new(1e-9).unwrap();
        let m = GmcPair::from_field(&f, &p).unwrap();
        for (c, k) in m.bulk.iter().zip((0..f.grid.len()).filter(|&k| f.grid.area[k] > 0.0)) {
            assert!((c.mass - f.grid.area[k]).abs() < 1e-7 * f.grid.area[k]);
        }
        assert!((m.boundary_total() - 2.0 * PI).abs() < 1e-6);
    }

    #[test]
    fn missing_metadata_and_boundary() {
        let g = Arc::new(Grid::disk(9, false).unwrap());
        let p = GammaParams::new(1.0).unwrap();
        let f = GridField::constant(g.clone(), 0.0);
        assert_eq!(bulk_gmc(&f, &p).unwrap_err(), LqgError::MissingCovarianceMetadata);
        let f = crate::gff::sample_gff(&g, BoundaryCondition::Dirichlet, None, 1).unwrap();
        assert_eq!(boundary_gmc(&f, &p).unwrap_err(), LqgError::NoFreeBoundary);
    }

    #[test]
    fn region_masses() {
        let m = GmcPair::from_field(&neumann_field(3), &GammaParams::new(1.0).unwrap()).unwrap();
        assert_eq!(
            region_mass(&m, &Region::WholeBulk),
            m.bulk.iter().map(|c| c.mass).sum::<f64>()
        );
        let arcs = [(0.0, 2.0), (2.0, 4.5), (4.5, 2.0 * PI)];
        let s: f64 = arcs
            .iter()
            .map(|&(a, b)| region_mass(&m, &Region::AngleArc { from: a, to: b }))
            .sum();
        assert!((s - m.boundary_total()).abs() < 1e-12 * m.boundary_total());
        assert_eq!(
            region_mass(
                &m,
                &Region::Ball {
                    center: pt(5.0, 5.0),
                    radius: 0.1
                }
            ),
            0.0
        );
        let small = region_mass(
            &m,
            &Region::Ball {
                center: -I / 3.0,
                radius: 0.3,
            },
        );
        let big = region_mass(
            &m,
            &Region::Ball {
                center: -I / 3.0,
                radius: 0.5,
            },
        );
        assert!(big >= small);
    }

    #[test]
    fn insertion_bounds() {
        for gamma in [0.3, 1.0, 1.5, 1.9] {
            let p = GammaParams::new(gamma).unwrap();
            let ins = InsertionSet::boundary_only(&[(gamma, pt(-1.0, 0.0)), (gamma, -I), (gamma, pt(1.0, 0.0))]);
            assert!(check_insertion_bounds(&ins, &p, BoundsMode::UnitBoundary).pass);
        }
        let p = GammaParams::new(1.5).unwrap();
        let ins = InsertionSet::boundary_only(&[(1.5, pt(-1.0, 0.0)), (1.5, -I), (1.5, pt(1.0, 0.0))]);
        assert!((ins.s(&p) - 1.0 / 6.0).abs() < 1e-12);
        assert!(check_insertion_bounds(&ins, &p, BoundsMode::Strict).pass);
        let bad = InsertionSet::boundary_only(&[(p.q, -I)]);
        let v = check_insertion_bounds(&bad, &p, BoundsMode::UnitBoundary);
        assert!(!v.pass && v.reasons.iter().any(|r| r.starts_with("β_j < Q violated")));
        let area = InsertionSet {
            bulk: vec![(p.q + 0.1, pt(0.0, 0.0))],
            boundary: vec![],
        };
        assert!(!check_insertion_bounds(&area, &p, BoundsMode::UnitArea).pass);
    }

    #[test]
    fn moments_trivial_cases() {
        let m = moment_estimate(&[2.0; 50], 1.5, None, 1).unwrap();
        assert!((m.estimate - 2f64.powf(1.5)).abs() < 1e-12);
        assert!((m.ci.1 - m.ci.0).abs() < 1e-12);
        let m = moment_estimate(&[0.3, 4.0, 1.0], 0.0, None, 1).unwrap();
        assert_eq!(m.estimate, 1.0);
        assert_eq!(moment_estimate(&[], 1.0, None, 1).unwrap_err(), LqgError::EmptySample);
        let p = GammaParams::new(1.0).unwrap();
        assert!((moment_threshold(&p) - 3.0).abs() < 1e-12);
        assert!(moment_estimate(&[1.0, 2.0], 3.5, Some(3.0), 1)
            .unwrap()
            .warning
            .is_some());
    }

    proptest! {
        #[test]
        fn enlarging_a_ball_never_decreases_mass(r in 0.05f64..0.9, dr in 0.0f64..0.5, seed in 0u64..4) {
            let m = GmcPair::from_field(&neumann_field(seed), &GammaParams::new(1.0).unwrap()).unwrap();
            let a = region_mass(&m, &Region::Ball { center: pt(0.1, -0.2), radius: r });
            let b = region_mass(&m, &Region::Ball { center: pt(0.1, -0.2), radius: r + dr });
            prop_assert!(b >= a);
        }
    }
}
