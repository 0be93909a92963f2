//! Planar domains, the closed-form conformal maps used by the constructions,
//! and the quantum change of coordinates `h -> h o psi + Q log|psi'|`.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{LqgError, Result};
use crate::gff::GridField;
use crate::gmc::{Cell, GmcPair};

pub type Point = Complex64;

pub const I: Point = Complex64 { re: 0.0, im: 1.0 };

pub fn pt(x: f64, y: f64) -> Point {
    Complex64::new(x, y)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Domain {
    UnitDisk,
    UpperHalfPlane,
    /// `R x [0, pi]`
    Strip,
    /// `radius * D ∩ H`
    HalfDisk {
        radius: f64,
    },
    /// `(left, inf) x [0, pi]`
    HalfStrip {
        left: f64,
    },
}

/// Position of a boundary point: which boundary component and the arclength
/// coordinate along it.
///
/// Components: disk 0 (angle in `[0, 2pi)`); half-plane 0 (x); strip 0 bottom,
/// 1 top (both by `Re`); half-disk 0 diameter (x), 1 semicircle (radius * angle);
/// half-strip 0 bottom, 1 top (by `Re - left`), 2 left edge (by `Im`).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundaryPosition {
    pub component: usize,
    pub arclength: f64,
}

impl Domain {
    pub fn half_disk(radius: f64) -> Result<Domain> {
        if radius > 0.0 && radius.is_finite() {
            Ok(Domain::HalfDisk { radius })
        } else {
            Err(LqgError::Domain(format!("half-disk radius {radius}")))
        }
    }

    pub fn half_strip(left: f64) -> Result<Domain> {
        if left.is_finite() {
            Ok(Domain::HalfStrip { left })
        } else {
            Err(LqgError::Domain("half-strip edge must be finite".into()))
        }
    }

    /// Membership in the closure, with slack `tol`.
    pub fn contains(&self, z: Point, tol: f64) -> bool {
        match *self {
            Domain::UnitDisk => z.norm() <= 1.0 + tol,
            Domain::UpperHalfPlane => z.im >= -tol,
            Domain::Strip => z.im >= -tol && z.im <= PI + tol,
            Domain::HalfDisk { radius } => z.im >= -tol && z.norm() <= radius + tol,
            Domain::HalfStrip { left } => z.im >= -tol && z.im <= PI + tol && z.re >= left - tol,
        }
    }

    pub fn boundary_position(&self, z: Point, tol: f64) -> Option<BoundaryPosition> {
        let bp = |component, arclength| Some(BoundaryPosition { component, arclength });
        match *self {
            Domain::UnitDisk => {
                if (z.norm() - 1.0).abs() <= tol {
                    bp(0, z.arg().rem_euclid(2.0 * PI))
                } else {
                    None
                }
            }
            Domain::UpperHalfPlane => {
                if z.im.abs() <= tol {
                    bp(0, z.re)
                } else {
                    None
                }
            }
            Domain::Strip => {
                if z.im.abs() <= tol {
                    bp(0, z.re)
                } else if (z.im - PI).abs() <= tol {
                    bp(1, z.re)
                } else {
                    None
                }
            }
            Domain::HalfDisk { radius } => {
                if z.im.abs() <= tol && z.re.abs() <= radius + tol {
                    bp(0, z.re)
                } else if (z.norm() - radius).abs() <= tol && z.im >= -tol {
                    bp(1, radius * z.arg().clamp(0.0, PI))
                } else {
                    None
                }
            }
            Domain::HalfStrip { left } => {
                if z.im.abs() <= tol {
                    bp(0, z.re - left)
                } else if (z.im - PI).abs() <= tol {
                    bp(1, z.re - left)
                } else if (z.re - left).abs() <= tol {
                    bp(2, z.im)
                } else {
                    None
                }
            }
        }
    }

    pub fn same_kind(&self, other: &Domain) -> bool {
        std::mem::discriminant(self) == std::mem::discriminant(other)
    }

    /// Strips and half-strips are charts of the same kind of surface; grids on a
    /// truncated window of one can carry fields of the other.
    pub fn compatible(&self, other: &Domain) -> bool {
        match (self, other) {
            (Domain::HalfDisk { radius: a }, Domain::HalfDisk { radius: b }) => (a - b).abs() < 1e-12,
            (Domain::HalfStrip { left: a }, Domain::HalfStrip { left: b }) => (a - b).abs() < 1e-12,
            (Domain::HalfDisk { .. }, Domain::UpperHalfPlane) | (Domain::UpperHalfPlane, Domain::HalfDisk { .. }) => {
                true
            }
            (Domain::HalfStrip { .. }, Domain::Strip) | (Domain::Strip, Domain::HalfStrip { .. }) => true,
            _ => self.same_kind(other),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GammaParams {
    pub gamma: f64,
    pub q: f64,
}

impl GammaParams {
    pub fn new(gamma: f64) -> Result<GammaParams> {
        if !(gamma > 0.0 && gamma < 2.0) {
            return Err(LqgError::Config(format!("gamma = {gamma} outside (0, 2)")));
        }
        Ok(GammaParams {
            gamma,
            q: gamma / 2.0 + 2.0 / gamma,
        })
    }

    /// `Q - gamma`, the drift of the radial part away from a gamma-insertion.
    pub fn drift(&self) -> f64 {
        self.q - self.gamma
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Inverse,
}

/// `phi(z) = (z - i)/(z + i)` (forward, H -> D) and `phi^{-1}(z) = i(1 + z)/(1 - z)`.
pub fn mobius_disk_halfplane(z: Point, direction: Direction) -> Result<Point> {
    match direction {
        Direction::Forward => {
            if (z + I).norm() == 0.0 {
                return Err(LqgError::Pole(format!("{z}")));
            }
            Ok((z - I) / (z + I))
        }
        Direction::Inverse => {
            if (z - 1.0).norm() == 0.0 {
                return Err(LqgError::Pole(format!("{z}")));
            }
            Ok(I * (1.0 + z) / (1.0 - z))
        }
    }
}

/// Forward `H -> S`, `z -> i pi - log z`; inverse `w -> exp(i pi - w)`.
/// The marked point 0 of H goes to `+inf`, infinity to `-inf`, and 1 to `i pi`.
pub fn strip_map(z: Point, direction: Direction) -> Result<Point> {
    match direction {
        Direction::Forward => {
            if z.norm() == 0.0 {
                return Err(LqgError::Pole("0".into()));
            }
            Ok(I * PI - z.ln())
        }
        Direction::Inverse => Ok((I * PI - z).exp()),
    }
}

/// A point of the Riemann sphere.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ExtPoint {
    Finite(Point),
    Infinity,
}

/// `z -> (a z + b)/(c z + d)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Mobius {
    pub a: Point,
    pub b: Point,
    pub c: Point,
    pub d: Point,
}

impl Mobius {
    pub fn identity() -> Mobius {
        Mobius {
            a: 1.0.into(),
            b: 0.0.into(),
            c: 0.0.into(),
            d: 1.0.into(),
        }
    }

    pub fn affine(scale: Point, shift: Point) -> Mobius {
        Mobius {
            a: scale,
            b: shift,
            c: 0.0.into(),
            d: 1.0.into(),
        }
    }

    pub fn apply(&self, z: Point) -> Result<Point> {
        let den = self.c * z + self.d;
        if den.norm() == 0.0 {
            return Err(LqgError::Pole(format!("{z}")));
        }
        Ok((self.a * z + self.b) / den)
    }

    pub fn apply_ext(&self, z: ExtPoint) -> ExtPoint {
        match z {
            ExtPoint::Infinity => {
                if self.c.norm() == 0.0 {
                    ExtPoint::Infinity
                } else {
                    ExtPoint::Finite(self.a / self.c)
                }
            }
            ExtPoint::Finite(z) => match self.apply(z) {
                Ok(w) => ExtPoint::Finite(w),
                Err(_) => ExtPoint::Infinity,
            },
        }
    }

    pub fn derivative(&self, z: Point) -> Result<Point> {
        let den = self.c * z + self.d;
        if den.norm() == 0.0 {
            return Err(LqgError::Pole(format!("{z}")));
        }
        Ok((self.a * self.d - self.b * self.c) / (den * den))
    }

    pub fn inverse(&self) -> Mobius {
        Mobius {
            a: self.d,
            b: -self.b,
            c: -self.c,
            d: self.a,
        }
    }

    /// `self o other`.
    pub fn compose(&self, other: &Mobius) -> Mobius {
        Mobius {
            a: self.a * other.a + self.b * other.c,
            b: self.a * other.b + self.b * other.d,
            c: self.c * other.a + self.d * other.c,
            d: self.c * other.b + self.d * other.d,
        }
    }

    /// The map sending `(z1, z2, z3)` to `(0, 1, inf)`.
    fn to_standard(z: [ExtPoint; 3]) -> Result<Mobius> {
        use ExtPoint::*;
        let one: Point = 1.0.into();
        let zero: Point = 0.0.into();
        let m = match z {
            [Infinity, Finite(z2), Finite(z3)] => Mobius {
                a: zero,
                b: z2 - z3,
                c: one,
                d: -z3,
            },
            [Finite(z1), Infinity, Finite(z3)] => Mobius {
                a: one,
                b: -z1,
                c: one,
                d: -z3,
            },
            [Finite(z1), Finite(z2), Infinity] => Mobius {
                a: one,
                b: -z1,
                c: zero,
                d: z2 - z1,
            },
            [Finite(z1), Finite(z2), Finite(z3)] => Mobius {
                a: z2 - z3,
                b: -z1 * (z2 - z3),
                c: z2 - z1,
                d: -z3 * (z2 - z1),
            },
            _ => return Err(LqgError::Geometry("repeated point at infinity".into())),
        };
        if (m.a * m.d - m.b * m.c).norm() < 1e-300 {
            return Err(LqgError::Geometry("points not distinct".into()));
        }
        Ok(m)
    }

    /// The unique Mobius map with `z_k -> w_k`.
    pub fn from_triples(z: [ExtPoint; 3], w: [ExtPoint; 3]) -> Result<Mobius> {
        let tz = Mobius::to_standard(z)?;
        let tw = Mobius::to_standard(w)?;
        Ok(tw.inverse().compose(&tz))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum MapKind {
    Identity,
    Mobius(Mobius),
    /// `z -> i pi - log z`
    HalfPlaneToStrip,
    /// `w -> exp(i pi - w)`
    StripToHalfPlane,
    /// Applied first to last.
    Compose(Vec<ConformalMap>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConformalMap {
    pub kind: MapKind,
    pub source: Domain,
    pub target: Domain,
}

impl ConformalMap {
    pub fn identity(domain: Domain) -> ConformalMap {
        ConformalMap {
            kind: MapKind::Identity,
            source: domain,
            target: domain,
        }
    }

    pub fn mobius(m: Mobius, source: Domain, target: Domain) -> ConformalMap {
        ConformalMap {
            kind: MapKind::Mobius(m),
            source,
            target,
        }
    }

    /// `phi: H -> D`.
    pub fn halfplane_to_disk() -> ConformalMap {
        let m = Mobius {
            a: 1.0.into(),
            b: -I,
            c: 1.0.into(),
            d: I,
        };
        ConformalMap::mobius(m, Domain::UpperHalfPlane, Domain::UnitDisk)
    }

    pub fn halfplane_to_strip() -> ConformalMap {
        ConformalMap {
            kind: MapKind::HalfPlaneToStrip,
            source: Domain::UpperHalfPlane,
            target: Domain::Strip,
        }
    }

    pub fn strip_to_halfplane() -> ConformalMap {
        ConformalMap {
            kind: MapKind::StripToHalfPlane,
            source: Domain::Strip,
            target: Domain::UpperHalfPlane,
        }
    }

    /// `z -> a z` on `domain` (a > 0 keeps H, strips are not preserved).
    pub fn scaling(a: f64, domain: Domain) -> ConformalMap {
        ConformalMap::mobius(Mobius::affine(a.into(), 0.0.into()), domain, domain)
    }

    pub fn rotation(theta: f64) -> ConformalMap {
        ConformalMap::mobius(
            Mobius::affine(Complex64::from_polar(1.0, theta), 0.0.into()),
            Domain::UnitDisk,
            Domain::UnitDisk,
        )
    }

    /// Horizontal translation of the strip.
    pub fn strip_translation(t: f64) -> ConformalMap {
        ConformalMap::mobius(Mobius::affine(1.0.into(), t.into()), Domain::Strip, Domain::Strip)
    }

    /// `w -> i pi - w`, the half turn of the strip exchanging its two ends and sides.
    pub fn strip_half_turn() -> ConformalMap {
        ConformalMap::mobius(Mobius::affine((-1.0).into(), I * PI), Domain::Strip, Domain::Strip)
    }

    /// `self` followed by `next`.
    pub fn then(self, next: ConformalMap) -> ConformalMap {
        let source = self.source;
        let target = next.target;
        let mut parts = match self.kind {
            MapKind::Compose(v) => v,
            _ => vec![self],
        };
        match next.kind {
            MapKind::Compose(v) => parts.extend(v),
            _ => parts.push(next),
        }
        ConformalMap {
            kind: MapKind::Compose(parts),
            source,
            target,
        }
    }

    pub fn forward(&self, z: Point) -> Result<Point> {
        match &self.kind {
            MapKind::Identity => Ok(z),
            MapKind::Mobius(m) => m.apply(z),
            MapKind::HalfPlaneToStrip => strip_map(z, Direction::Forward),
            MapKind::StripToHalfPlane => strip_map(z, Direction::Inverse),
            MapKind::Compose(parts) => parts.iter().try_fold(z, |acc, m| m.forward(acc)),
        }
    }

    pub fn inverse(&self, w: Point) -> Result<Point> {
        match &self.kind {
            MapKind::Identity => Ok(w),
            MapKind::Mobius(m) => m.inverse().apply(w),
            MapKind::HalfPlaneToStrip => strip_map(w, Direction::Inverse),
            MapKind::StripToHalfPlane => strip_map(w, Direction::Forward),
            MapKind::Compose(parts) => parts.iter().rev().try_fold(w, |acc, m| m.inverse(acc)),
        }
    }

    /// `log |f'(z)|` of the forward map.
    pub fn log_abs_derivative(&self, z: Point) -> Result<f64> {
        match &self.kind {
            MapKind::Identity => Ok(0.0),
            MapKind::Mobius(m) => Ok(m.derivative(z)?.norm().ln()),
            MapKind::HalfPlaneToStrip => {
                if z.norm() == 0.0 {
                    return Err(LqgError::Pole("0".into()));
                }
                Ok(-z.norm().ln())
            }
            MapKind::StripToHalfPlane => Ok(-z.re),
            MapKind::Compose(parts) => {
                let mut acc = 0.0;
                let mut x = z;
                for m in parts {
                    acc += m.log_abs_derivative(x)?;
                    x = m.forward(x)?;
                }
                Ok(acc)
            }
        }
    }
}

/// `h o psi + Q log|psi'|` sampled on `source_grid`, where `psi = map` sends the
/// source domain onto the domain carrying `field`. Values come from bilinear
/// interpolation; covariance metadata is carried along with the diagonal
/// corrections `-log|psi'|` (bulk) and `-2 log|psi'|` (boundary).
pub fn change_of_coordinates(
    field: &GridField,
    map: &ConformalMap,
    params: &GammaParams,
    source_grid: std::sync::Arc<crate::gff::Grid>,
) -> Result<GridField> {
    if !field.grid.domain.compatible(&map.target) {
        return Err(LqgError::DomainMismatch(format!(
            "field lives on {:?}, map targets {:?}",
            field.grid.domain, map.target
        )));
    }
    if !source_grid.domain.compatible(&map.source) {
        return Err(LqgError::DomainMismatch(format!(
            "grid lives on {:?}, map starts from {:?}",
            source_grid.domain, map.source
        )));
    }
    let n = source_grid.nodes.len();
    let mut values = Vec::with_capacity(n);
    let mut var = Vec::with_capacity(n);
    let mut bulk = Vec::with_capacity(n);
    let mut bdry = Vec::with_capacity(n);
    let meta = field.meta.as_ref();
    for (k, &z) in source_grid.nodes.iter().enumerate() {
        let w = map.forward(z)?;
        let ld = map.log_abs_derivative(z)?;
        let stencil = field.grid.interp_stencil(w);
        if stencil.is_empty() && field.grid.locate(w).is_none() {
            return Err(LqgError::DomainMismatch(format!(
                "image point {w} outside the field grid"
            )));
        }
        let apply = |v: &[f64]| stencil.iter().map(|&(i, c)| c * v[i]).sum::<f64>();
        values.push(apply(&field.values) + params.q * ld);
        if let Some(m) = meta {
            var.push(apply(&m.variance));
            bulk.push(apply(&m.bulk_diag) - ld);
            let b = if source_grid.edge[k] > 0.0 {
                apply(&m.bdry_diag) - 2.0 * ld
            } else {
                f64::NAN
            };
            bdry.push(b);
        }
    }
    let meta = meta.map(|m| {
        std::sync::Arc::new(crate::gff::CovMeta {
            id: format!("{}|ccd", m.id),
            variance: var,
            bulk_diag: bulk,
            bdry_diag: bdry,
        })
    });
    Ok(GridField {
        grid: source_grid,
        values,
        meta,
        deterministic: None,
        flagged: Vec::new(),
    })
}

/// Moves every cell and edge mass to the image of its location. Totals are unchanged.
pub fn pushforward_measure(measure: &GmcPair, map: &ConformalMap) -> Result<GmcPair> {
    if !measure.domain.compatible(&map.source) {
        return Err(LqgError::DomainMismatch(format!(
            "measure lives on {:?}, map starts from {:?}",
            measure.domain, map.source
        )));
    }
    let push = |cells: &[Cell]| -> Result<Vec<Cell>> {
        cells
            .iter()
            .map(|c| {
                Ok(Cell {
                    pos: map.forward(c.pos)?,
                    mass: c.mass,
                })
            })
            .collect()
    };
    Ok(GmcPair {
        domain: map.target,
        bulk: push(&measure.bulk)?,
        boundary: push(&measure.boundary)?,
        gamma: measure.gamma,
        field_ref: format!("{}|push", measure.field_ref),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn mobius_examples() {
        let w = mobius_disk_halfplane(pt(0.0, 0.0), Direction::Forward).unwrap();
        assert_abs_diff_eq!(w.re, -1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(w.im, 0.0, epsilon = 1e-15);
        let w = mobius_disk_halfplane(pt(-1.0, 0.0), Direction::Inverse).unwrap();
        assert!(w.norm() < 1e-15);
        let z = pt(0.3, 0.4);
        let back = mobius_disk_halfplane(
            mobius_disk_halfplane(z, Direction::Inverse).unwrap(),
            Direction::Forward,
        )
        .unwrap();
        assert!((back - z).norm() < 1e-12);
        assert!(matches!(
            mobius_disk_halfplane(-I, Direction::Forward),
            Err(LqgError::Pole(_))
        ));
        assert!(matches!(
            mobius_disk_halfplane(pt(1.0, 0.0), Direction::Inverse),
            Err(LqgError::Pole(_))
        ));
    }

    #[test]
    fn strip_examples() {
        let w = strip_map(pt(1.0, 0.0), Direction::Forward).unwrap();
        assert!((w - I * PI).norm() < 1e-15);
        let w = strip_map(pt(std::f64::consts::E, 0.0), Direction::Forward).unwrap();
        assert!((w - (I * PI - 1.0)).norm() < 1e-15);
        let z = pt(2.0, 1.0);
        let back = strip_map(strip_map(z, Direction::Forward).unwrap(), Direction::Inverse).unwrap();
        assert!((back - z).norm() < 1e-12);
        assert!(strip_map(pt(0.0, 0.0), Direction::Forward).is_err());
    }

    #[test]
    fn strip_map_sends_halfplane_into_strip() {
        for &z in &[pt(0.5, 1e-9), pt(-3.0, 1e-9), pt(0.0, 2.0), pt(-1e3, 5.0)] {
            let w = strip_map(z, Direction::Forward).unwrap();
            assert!(Domain::Strip.contains(w, 1e-12), "{z} -> {w}");
        }
        // positive reals go to the top side, negative reals to the bottom side
        assert!((strip_map(pt(3.0, 0.0), Direction::Forward).unwrap().im - PI).abs() < 1e-15);
        assert!(strip_map(pt(-3.0, 0.0), Direction::Forward).unwrap().im.abs() < 1e-15);
    }

    #[test]
    fn triples() {
        let z = [
            ExtPoint::Finite(pt(-1.0, 0.0)),
            ExtPoint::Finite(-I),
            ExtPoint::Finite(pt(1.0, 0.0)),
        ];
        let w = [
            ExtPoint::Finite(pt(0.0, 0.0)),
            ExtPoint::Finite(pt(1.0, 0.0)),
            ExtPoint::Infinity,
        ];
        let m = Mobius::from_triples(z, w).unwrap();
        for k in 0..3 {
            match (m.apply_ext(z[k]), w[k]) {
                (ExtPoint::Finite(a), ExtPoint::Finite(b)) => assert!((a - b).norm() < 1e-12),
                (ExtPoint::Infinity, ExtPoint::Infinity) => {}
                other => panic!("{other:?}"),
            }
        }
        // this is phi^{-1}
        let q = pt(0.2, -0.3);
        assert!((m.apply(q).unwrap() - mobius_disk_halfplane(q, Direction::Inverse).unwrap()).norm() < 1e-12);
    }

    #[test]
    fn composite_derivative_matches_finite_difference() {
        let map = ConformalMap::halfplane_to_strip()
            .then(ConformalMap::strip_translation(0.7))
            .then(ConformalMap::strip_to_halfplane())
            .then(ConformalMap::halfplane_to_disk());
        let z = pt(0.4, 0.9);
        let h = 1e-6;
        let fd = (map.forward(z + h).unwrap() - map.forward(z - h).unwrap()).norm() / (2.0 * h);
        assert!((map.log_abs_derivative(z).unwrap() - fd.ln()).abs() < 1e-8);
    }

    fn check_roundtrip(map: &ConformalMap, z: Point) {
        let w = map.forward(z).unwrap();
        let back = map.inverse(w).unwrap();
        assert!((back - z).norm() < 1e-12 * (1.0 + z.norm()), "{z} {back}");
    }

    proptest! {
        #[test]
        fn every_map_inverts(r in 0.0f64..0.99, th in 0.0f64..std::f64::consts::TAU, x in -5.0f64..5.0, y in 0.01f64..5.0, t in -5.0f64..5.0, s in 0.01f64..3.13) {
            let d = Complex64::from_polar(r, th);
            let h = pt(x, y);
            let w = pt(t, s);
            check_roundtrip(&ConformalMap::halfplane_to_disk(), h);
            check_roundtrip(&ConformalMap::halfplane_to_strip(), h);
            check_roundtrip(&ConformalMap::strip_to_halfplane(), w);
            check_roundtrip(&ConformalMap::rotation(1.1), d);
            check_roundtrip(&ConformalMap::strip_half_turn(), w);
            check_roundtrip(&ConformalMap::halfplane_to_strip().then(ConformalMap::strip_translation(1.3)), h);
            // phi maps H into D, phi^{-1} maps D into H
            prop_assert!(mobius_disk_halfplane(h, Direction::Forward).unwrap().norm() < 1.0);
            prop_assert!(mobius_disk_halfplane(d, Direction::Inverse).unwrap().im > 0.0);
        }
    }

    #[test]
    fn q_exceeds_two() {
        for k in 1..200 {
            let g = 2.0 * k as f64 / 200.0;
            if g >= 2.0 {
                break;
            }
            let p = GammaParams::new(g).unwrap();
            assert!(p.q > 2.0 || (g - 2.0).abs() < 1e-12);
            assert!(p.drift() > 0.0);
        }
        assert!(GammaParams::new(2.0).is_err());
        assert!(GammaParams::new(0.0).is_err());
    }

    #[test]
    fn boundary_positions() {
        let b = Domain::UnitDisk.boundary_position(I, 1e-12).unwrap();
        assert!((b.arclength - PI / 2.0).abs() < 1e-15);
        let b = Domain::HalfDisk { radius: 2.0 }
            .boundary_position(pt(0.0, 2.0), 1e-12)
            .unwrap();
        assert_eq!(b.component, 1);
        assert!((b.arclength - PI).abs() < 1e-12);
        assert!(Domain::Strip.boundary_position(pt(1.0, 1.0), 1e-12).is_none());
        assert!(Domain::half_disk(-1.0).is_err());
        assert!(Domain::half_strip(f64::NEG_INFINITY).is_err());
    }
}
