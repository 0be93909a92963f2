//! Quick exact checks run by `lqg selftest`: kernel closed forms and symmetry,
//! shift rules of the measures, coordinate maps, weight algebra, persistence.

use std::sync::Arc;

use rand::Rng;

use super::records::SampleRecord;
use super::stats::{two_sample_test, WeightedSample};
use crate::constructions::{three_point_s, ConstructionTag};
use crate::geometry::{mobius_disk_halfplane, pt, Direction, GammaParams, Point, I};
use crate::gff::{sample_gff, Grid};
use crate::gmc::GmcPair;
use crate::green::{green_disk, green_disk_dirichlet, green_halfplane, BackgroundMeasure, BoundaryCondition};
use crate::rng;

#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
}

fn check(name: &'static str, err: f64, tol: f64) -> Check {
    Check {
        name,
        pass: err <= tol,
        detail: format!("max error {err:.3e} (tolerance {tol:.0e})"),
    }
}

fn random_disk_point<R: Rng>(g: &mut R) -> Point {
    Point::from_polar(
        0.95 * g.random::<f64>().sqrt(),
        2.0 * std::f64::consts::PI * g.random::<f64>(),
    )
}

pub fn selftest() -> Vec<Check> {
    let mut out = Vec::new();
    let mut g = rng::stream(0x5e1f, &[rng::MOD_HARNESS]);

    let closed = (green_disk(pt(0.0, 0.0), pt(0.5, 0.0)).map(|v| (v - 2f64.ln()).abs()))
        .unwrap_or(f64::INFINITY)
        .max(
            green_halfplane(I, 2.0 * I)
                .map(|v| (v + 3f64.ln()).abs())
                .unwrap_or(f64::INFINITY),
        );
    out.push(check("kernel closed forms", closed, 1e-12));

    let mut sym: f64 = 0.0;
    let mut edge: f64 = 0.0;
    for _ in 0..100 {
        let (x, y) = (random_disk_point(&mut g), random_disk_point(&mut g));
        let (hx, hy) = (
            pt(4.0 * g.random::<f64>() - 2.0, 0.05 + 2.0 * g.random::<f64>()),
            pt(4.0 * g.random::<f64>() - 2.0, 0.05 + 2.0 * g.random::<f64>()),
        );
        let d = |a: crate::error::Result<f64>, b: crate::error::Result<f64>| match (a, b) {
            (Ok(a), Ok(b)) => (a - b).abs(),
            _ => f64::INFINITY,
        };
        sym = sym
            .max(d(green_disk(x, y), green_disk(y, x)))
            .max(d(green_disk_dirichlet(x, y), green_disk_dirichlet(y, x)))
            .max(d(green_halfplane(hx, hy), green_halfplane(hy, hx)));
        let on_circle = Point::from_polar(1.0, 2.0 * std::f64::consts::PI * g.random::<f64>());
        edge = edge.max(
            green_disk_dirichlet(x, on_circle)
                .map(f64::abs)
                .unwrap_or(f64::INFINITY),
        );
    }
    out.push(check("kernel symmetry", sym, 1e-12));
    out.push(check("zero boundary values", edge, 1e-12));

    let mut trip: f64 = 0.0;
    for _ in 0..100 {
        let z = random_disk_point(&mut g);
        let back = mobius_disk_halfplane(z, Direction::Forward)
            .and_then(|w| mobius_disk_halfplane(w, Direction::Inverse))
            .map(|b| (b - z).norm())
            .unwrap_or(f64::INFINITY);
        trip = trip.max(back);
    }
    out.push(check("disk to half-plane round trip", trip, 1e-12));

    let shift = (|| -> crate::error::Result<f64> {
        let grid = Arc::new(Grid::disk(13, true)?);
        let f = sample_gff(
            &grid,
            BoundaryCondition::Neumann,
            Some(&BackgroundMeasure::uniform_boundary_disk(512)),
            7,
        )?;
        let mut worst: f64 = 0.0;
        for gamma in [0.5, 1.0, 1.7] {
            let p = GammaParams::new(gamma)?;
            let c: f64 = 4.0 * g.random::<f64>() - 2.0;
            let a = GmcPair::from_field(&f, &p)?;
            let b = GmcPair::from_field(&f.shifted(c), &p)?;
            for (x, y) in a.bulk.iter().zip(&b.bulk) {
                worst = worst.max((y.mass / x.mass / (gamma * c).exp() - 1.0).abs());
            }
            for (x, y) in a.boundary.iter().zip(&b.boundary) {
                worst = worst.max((y.mass / x.mass / (0.5 * gamma * c).exp() - 1.0).abs());
            }
        }
        Ok(worst)
    })()
    .unwrap_or(f64::INFINITY);
    out.push(check("measure shift rules", shift, 1e-12));

    let s = GammaParams::new(2f64.sqrt())
        .map(|p| three_point_s(&p).abs())
        .unwrap_or(f64::INFINITY);
    out.push(check("unit weights at gamma = sqrt 2", s, 0.0));

    let rec = SampleRecord {
        tag: ConstructionTag::SharedWeighted,
        gamma: 1.8,
        eps: Some(1e-3),
        delta: Some(0.1),
        grid: 129,
        seed: u64::MAX,
        replica: 3,
        weight: 1.0 / 3.0,
        log_weight: -(3f64.ln()),
        observables: [0.1, 0.2, 0.7, std::f64::consts::PI, 1e-300],
        a_eps: Some(-2.5),
        a_band: None,
        t_root: Some(-0.3),
        log_d: Some(6.9),
        nu_raw: Some(17.0),
        attempts: 2,
    };
    let same = SampleRecord::parse_line(&rec.to_line(), 1)
        .map(|r| r == rec)
        .unwrap_or(false);
    out.push(Check {
        name: "record round trip",
        pass: same,
        detail: if same { "lossless".into() } else { "mismatch".into() },
    });

    let x = WeightedSample::unweighted((0..200).map(|k| (k as f64).sin()).collect());
    let ks = two_sample_test(&x, &x, 0.01, 1)
        .map(|t| t.statistic.max(1.0 - t.p_value))
        .unwrap_or(f64::INFINITY);
    out.push(check("KS on identical samples", ks, 0.0));
    out
}
