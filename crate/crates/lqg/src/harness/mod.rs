//! Experiment plumbing: observables, sample records, statistics, reports.

mod config;
mod records;
mod report;
mod selftest;
pub mod stats;

use std::f64::consts::PI;

pub use config::ExperimentConfig;
pub use records::{read_samples, write_samples, SampleRecord};
pub use report::{
    column_dump, compare_records, report_from_records, run_equivalence, run_replicas, tv_trend, ComparisonReport,
    GammaSection, PairComparison, SamplerSpec, SamplerSummary, TvRow, Verdict,
};
pub use selftest::{selftest, Check};
pub use stats::{
    anderson_darling_normal, calibrate, effective_sample_size, ks_statistic, moment_table, two_sample_test,
    Calibration, KsTest, WeightedSample,
};

use crate::constructions::DiskSample;
use crate::geometry::Point;
use crate::gmc::{region_mass, GmcPair, Region};

pub const OBSERVABLES: [&str; 5] = ["arc1", "arc2", "arc3", "mu_total", "mu_ball"];

/// Boundary masses of the arcs `z1 -> z2`, `z2 -> z3`, `z3 -> z1` (counterclockwise),
/// bulk mass, and bulk mass of the ball of radius 1/2 around the centroid of the marked points.
pub fn estimate_observables(sample: &DiskSample) -> [f64; 5] {
    let arcs = arc_masses(&sample.measures, &sample.marked_points);
    let c = sample.marked_points.iter().sum::<Point>() / 3.0;
    [
        arcs[0],
        arcs[1],
        arcs[2],
        sample.measures.bulk_total(),
        region_mass(&sample.measures, &Region::Ball { center: c, radius: 0.5 }),
    ]
}

/// Boundary mass between consecutive marked points; an edge sitting exactly on
/// a marked point is split evenly between its two arcs.
pub fn arc_masses(measures: &GmcPair, points: &[Point; 3]) -> [f64; 3] {
    let ang: Vec<f64> = points.iter().map(|p| p.arg().rem_euclid(2.0 * PI)).collect();
    let span = |k: usize| (ang[(k + 1) % 3] - ang[k]).rem_euclid(2.0 * PI);
    let mut out = [0.0; 3];
    for c in &measures.boundary {
        let a = c.pos.arg().rem_euclid(2.0 * PI);
        let mut placed = false;
        for k in 0..3 {
            let d = (a - ang[k]).rem_euclid(2.0 * PI);
            if d.min(2.0 * PI - d) < 1e-12 {
                out[k] += 0.5 * c.mass;
                out[(k + 2) % 3] += 0.5 * c.mass;
                placed = true;
                break;
            }
        }
        if !placed {
            let k = (0..3)
                .find(|&k| (a - ang[k]).rem_euclid(2.0 * PI) < span(k))
                .unwrap_or(2);
            out[k] += c.mass;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constructions::{sample_hrv_direct, StripResolution, DEFAULT_POINTS};
    use crate::geometry::{Domain, GammaParams};
    use crate::gmc::Cell;
    use num_complex::Complex64;

    fn ring(masses: &[f64]) -> GmcPair {
        let n = masses.len();
        GmcPair {
            domain: Domain::UnitDisk,
            bulk: vec![
                Cell {
                    pos: Complex64::new(0.0, 0.0),
                    mass: 2.0,
                },
                Cell {
                    pos: Complex64::new(0.9, 0.0),
                    mass: 1.0,
                },
            ],
            boundary: (0..n)
                .map(|k| Cell {
                    pos: Complex64::from_polar(1.0, 2.0 * PI * (k as f64 + 0.5) / n as f64),
                    mass: masses[k],
                })
                .collect(),
            gamma: 1.0,
            field_ref: String::new(),
        }
    }

    #[test]
    fn arcs_partition_a_unit_boundary_sample() {
        let p = GammaParams::new(1.2).unwrap();
        let s = sample_hrv_direct(&p, &DEFAULT_POINTS, &StripResolution::new(33), 4).unwrap();
        let o = estimate_observables(&s);
        assert!((o[0] + o[1] + o[2] - 1.0).abs() < 1e-9);
        assert!(o[4] <= o[3]);
    }

    #[test]
    fn rotating_points_permutes_arcs() {
        let m = ring(&(0..60).map(|k| 1.0 + (k as f64).sin().abs()).collect::<Vec<_>>());
        let p = [
            Complex64::from_polar(1.0, 0.2),
            Complex64::from_polar(1.0, 2.5),
            Complex64::from_polar(1.0, 4.4),
        ];
        let a = arc_masses(&m, &p);
        let b = arc_masses(&m, &[p[1], p[2], p[0]]);
        assert_eq!([a[1], a[2], a[0]], b);
    }

    #[test]
    fn edge_on_a_marked_point_is_split() {
        let m = ring(&[1.0, 1.0, 1.0, 1.0]);
        let at = |k: f64| Complex64::from_polar(1.0, 2.0 * PI * (k + 0.5) / 4.0);
        let a = arc_masses(&m, &[at(0.0), at(1.0), at(2.5)]);
        assert_eq!(a, [1.0, 1.5, 1.5]);
    }

    #[test]
    fn zero_radius_ball_has_no_mass() {
        assert_eq!(
            region_mass(
                &ring(&[1.0]),
                &Region::Ball {
                    center: Complex64::new(0.0, 0.0),
                    radius: 0.0
                }
            ),
            0.0
        );
    }
}
