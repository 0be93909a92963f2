//! Gaussian free fields on grids: sampling, circle averages, radial/angular
//! splitting, log-singularity fields and the rooted-field decomposition.

pub mod dense;
pub mod grid;
pub mod strip;

use std::f64::consts::PI;
use std::sync::Arc;

pub use dense::{cached_sampler, DenseSampler};
pub use grid::Grid;
pub use strip::StripSampler;

use crate::error::{LqgError, Result};
use crate::geometry::{Domain, GammaParams, Point, I};
use crate::green::{BackgroundMeasure, BoundaryCondition, GreenKernel, RhoKernel};

/// Per-node data needed to normalize chaos measures: the variance of the
/// Gaussian part of the field that gets renormalized, and the regularized
/// diagonals of its kernel (bulk at `bulk_ref`, boundary on free edges).
#[derive(Clone, Debug, PartialEq)]
pub struct CovMeta {
    pub id: String,
    pub variance: Vec<f64>,
    pub bulk_diag: Vec<f64>,
    pub bdry_diag: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct GridField {
    pub grid: Arc<Grid>,
    pub values: Vec<f64>,
    pub meta: Option<Arc<CovMeta>>,
    /// Deterministic part already included in `values`.
    pub deterministic: Option<Vec<f64>>,
    /// Nodes where a log singularity was clamped.
    pub flagged: Vec<usize>,
}

impl GridField {
    pub fn constant(grid: Arc<Grid>, c: f64) -> GridField {
        let n = grid.len();
        GridField {
            grid,
            values: vec![c; n],
            meta: None,
            deterministic: None,
            flagged: Vec::new(),
        }
    }

    pub fn from_values(grid: Arc<Grid>, values: Vec<f64>) -> GridField {
        GridField {
            grid,
            values,
            meta: None,
            deterministic: None,
            flagged: Vec::new(),
        }
    }

    /// Same field plus a constant.
    pub fn shifted(&self, c: f64) -> GridField {
        let mut f = self.clone();
        f.values.iter_mut().for_each(|v| *v += c);
        if let Some(d) = f.deterministic.as_mut() {
            d.iter_mut().for_each(|v| *v += c);
        }
        f
    }

    pub fn at(&self, w: Point) -> Option<f64> {
        self.grid.interpolate(&self.values, w)
    }
}

/// Centered field with the kernel of `bc` on `grid`; a free field needs `rho`,
/// whose average of the field is then exactly zero.
pub fn sample_gff(
    grid: &Arc<Grid>,
    bc: BoundaryCondition,
    rho: Option<&BackgroundMeasure>,
    seed: u64,
) -> Result<GridField> {
    let n = grid.len();
    if n > dense::DEFAULT_MAX_NODES {
        return Err(LqgError::Size {
            nodes: n,
            limit: dense::DEFAULT_MAX_NODES,
        });
    }
    let s = cached_sampler(grid.clone(), bc, rho.cloned(), None, "")?;
    Ok(s.sample(seed, 0))
}

/// Log-singularity data: bulk `(alpha, z)` and boundary `(beta, s)` pairs.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct InsertionSet {
    pub bulk: Vec<(f64, Point)>,
    pub boundary: Vec<(f64, Point)>,
}

impl InsertionSet {
    pub fn boundary_only(points: &[(f64, Point)]) -> InsertionSet {
        InsertionSet {
            bulk: Vec::new(),
            boundary: points.to_vec(),
        }
    }

    /// `sum alpha + sum beta / 2 - Q`.
    pub fn s(&self, params: &GammaParams) -> f64 {
        self.bulk.iter().map(|a| a.0).sum::<f64>() + self.boundary.iter().map(|b| 0.5 * b.0).sum::<f64>() - params.q
    }

    fn points(&self) -> Vec<Point> {
        self.bulk.iter().chain(&self.boundary).map(|x| x.1).collect()
    }
}

/// Trapezoid weights of the (semi)circle average of an interpolated field. On
/// half-plane type domains a center on the real line gives the semicircle.
pub fn circle_average_weights(grid: &Grid, center: Point, r: f64) -> Result<Vec<(usize, f64)>> {
    if !(r >= 2.0 * grid.spacing) {
        return Err(LqgError::Geometry(format!(
            "radius {r} below twice the spacing {}",
            grid.spacing
        )));
    }
    let semi = matches!(grid.domain, Domain::HalfDisk { .. } | Domain::UpperHalfPlane) && center.im.abs() < 1e-12;
    let k = 64usize.max((2.0 * PI * r / grid.spacing).ceil() as usize);
    let pts: Vec<(Point, f64)> = if semi {
        (0..=k)
            .map(|i| {
                let w = if i == 0 || i == k { 0.5 } else { 1.0 } / k as f64;
                (center + Point::from_polar(r, PI * i as f64 / k as f64), w)
            })
            .collect()
    } else {
        (0..k)
            .map(|i| {
                (
                    center + Point::from_polar(r, 2.0 * PI * i as f64 / k as f64),
                    1.0 / k as f64,
                )
            })
            .collect()
    };
    let mut acc = std::collections::BTreeMap::new();
    for (z, w) in pts {
        if !grid.domain.contains(z, 1e-9) {
            return Err(LqgError::Geometry(format!(
                "circle of radius {r} around {center} leaves the domain at {z}"
            )));
        }
        let s = grid.interp_stencil(z);
        if s.is_empty() && grid.domain.boundary_position(z, 1e-9).is_none() {
            return Err(LqgError::Geometry(format!(
                "point {z} of the circle not covered by the grid"
            )));
        }
        for (n, c) in s {
            *acc.entry(n).or_insert(0.0) += w * c;
        }
    }
    Ok(acc.into_iter().collect())
}

pub fn circle_average(field: &GridField, center: Point, r: f64) -> Result<f64> {
    let w = circle_average_weights(&field.grid, center, r)?;
    Ok(w.iter().map(|&(k, c)| c * field.values[k]).sum())
}

/// Line means of a strip field (trapezoid over the rows) and the remainder.
pub fn radial_angular_decompose(field: &GridField) -> Result<(Vec<f64>, GridField)> {
    match field.grid.domain {
        Domain::Strip | Domain::HalfStrip { .. } => {}
        d => return Err(LqgError::Domain(format!("radial/angular split on {d:?}"))),
    }
    let (ncols, ny) = field.grid.shape();
    let m = ny - 1;
    let mut radial = Vec::with_capacity(ncols);
    let mut angular = field.clone();
    angular.deterministic = None;
    for i in 0..ncols {
        let col = &field.values[i * ny..(i + 1) * ny];
        let mean = (0.5 * col[0] + col[1..m].iter().sum::<f64>() + 0.5 * col[m]) / m as f64;
        radial.push(mean);
        angular.values[i * ny..(i + 1) * ny].iter_mut().for_each(|v| *v -= mean);
    }
    Ok((radial, angular))
}

/// A point at distance at least `h/2` from `p` in the direction of `z`, or
/// into the domain when `z == p`.
fn clamp_away(z: Point, p: Point, h: f64, domain: Domain) -> Point {
    let d = z - p;
    if d.norm() >= 0.5 * h {
        return z;
    }
    let dir = if d.norm() > 0.0 {
        d / d.norm()
    } else {
        match domain {
            Domain::UnitDisk => {
                if p.norm() > 0.0 {
                    -p / p.norm()
                } else {
                    1.0.into()
                }
            }
            _ => I,
        }
    };
    p + dir * (0.5 * h)
}

/// `base + Q m(G(z,.)) + sum alpha G^rho(z, z_i) + sum beta/2 G^rho(z, s_j)`,
/// with kernel arguments kept at distance `h/2` from every insertion.
pub fn build_insertion_field(
    base: &GridField,
    ins: &InsertionSet,
    kernel: &GreenKernel,
    rho: &BackgroundMeasure,
    params: &GammaParams,
) -> Result<GridField> {
    let pts = ins.points();
    for (a, p) in pts.iter().enumerate() {
        if pts[a + 1..].iter().any(|q| (q - p).norm() < 1e-12) {
            return Err(LqgError::CoincidentInsertions);
        }
    }
    let rk = RhoKernel::new(*kernel, rho.clone())?;
    insertion_field_with(base, ins, &rk, params)
}

pub fn insertion_field_with(
    base: &GridField,
    ins: &InsertionSet,
    rk: &RhoKernel,
    params: &GammaParams,
) -> Result<GridField> {
    let grid = &base.grid;
    let h = grid.spacing;
    let terms: Vec<(f64, Point, f64)> = ins
        .bulk
        .iter()
        .map(|&(a, z)| (a, z))
        .chain(ins.boundary.iter().map(|&(b, s)| (0.5 * b, s)))
        .map(|(c, p)| Ok((c, p, rk.mean(p)?)))
        .collect::<Result<_>>()?;
    let mut det = vec![0.0; grid.len()];
    let mut flagged = Vec::new();
    for (k, &z) in grid.nodes.iter().enumerate() {
        let mz = rk.mean(z)?;
        let mut v = params.q * mz;
        for &(c, p, mp) in &terms {
            let zc = clamp_away(z, p, h, grid.domain);
            if zc != z && !flagged.contains(&k) {
                flagged.push(k);
            }
            let mzc = if zc == z { mz } else { rk.mean(zc)? };
            v += c * (rk.kernel.eval_raw(zc, p) - mzc - mp + rk.theta);
        }
        det[k] = v;
    }
    let mut out = base.clone();
    out.values.iter_mut().zip(&det).for_each(|(a, b)| *a += b);
    out.deterministic = Some(match &base.deterministic {
        Some(d) => d.iter().zip(&det).map(|(a, b)| a + b).collect(),
        None => det,
    });
    out.flagged = flagged;
    Ok(out)
}

/// `-log(|z| v 1)`.
pub fn g_profile(z: Point) -> f64 {
    -z.norm().max(1.0).ln()
}

/// Deterministic part of the half-plane field with gamma-insertions at 0, 1
/// and infinity and zero mean on the unit semicircle:
/// `(gamma/2)(G_H(z,0) + G_H(z,1)) + 2 s log(|z| v 1)`, before the constant.
pub fn halfplane_insertion_profile(z: Point, params: &GammaParams, h: f64) -> f64 {
    let s = 1.5 * params.gamma - params.q;
    let k = GreenKernel::halfplane();
    let z0 = clamp_away(z, 0.0.into(), h, Domain::UpperHalfPlane);
    let z1 = clamp_away(z, 1.0.into(), h, Domain::UpperHalfPlane);
    0.5 * params.gamma * (k.eval_raw(z0, 0.0.into()) + k.eval_raw(z1, 1.0.into())) - 2.0 * s * g_profile(z)
}

/// The half-plane field on a half-disk grid: a mixed-boundary GFF pinned to
/// zero unit-semicircle average plus the three-insertion profile and the
/// constant making the total semicircle average vanish.
pub fn build_hl_halfplane(grid: &Arc<Grid>, params: &GammaParams, seed: u64) -> Result<GridField> {
    let Domain::HalfDisk { radius } = grid.domain else {
        return Err(LqgError::Domain(format!(
            "half-plane field needs a half-disk grid, got {:?}",
            grid.domain
        )));
    };
    if radius <= 1.0 + 2.0 * grid.spacing {
        return Err(LqgError::Geometry("half-disk must contain the unit semicircle".into()));
    }
    let w = circle_average_weights(grid, 0.0.into(), 1.0)?;
    let mut pin = vec![0.0; grid.len()];
    for (k, c) in &w {
        pin[*k] = *c;
    }
    let rho = BackgroundMeasure::uniform_semicircle(grid.domain, 512)?;
    let s = cached_sampler(
        grid.clone(),
        BoundaryCondition::Mixed,
        Some(rho),
        Some(pin),
        "semicircle-pin",
    )?;
    let base = s.sample(seed, 0);
    let mut det: Vec<f64> = grid
        .nodes
        .iter()
        .map(|z| halfplane_insertion_profile(*z, params, grid.spacing))
        .collect();
    let c: f64 = w.iter().map(|&(k, a)| a * det[k]).sum();
    det.iter_mut().for_each(|v| *v -= c);
    let mut out = base;
    out.values.iter_mut().zip(&det).for_each(|(a, b)| *a += b);
    out.flagged = (0..grid.len())
        .filter(|&k| grid.nodes[k].norm() < 0.5 * grid.spacing || (grid.nodes[k] - 1.0).norm() < 0.5 * grid.spacing)
        .collect();
    out.deterministic = Some(det);
    Ok(out)
}

/// Projection of a rooted field on its unit-semicircle average.
#[derive(Clone, Debug)]
pub struct RootedDecomposition {
    pub a_eps: f64,
    pub g_profile: Vec<f64>,
    /// `field - a_eps (1 + 2 g / log d)`
    pub remainder: Vec<f64>,
    pub log_d: f64,
}

impl RootedDecomposition {
    pub fn reassemble(&self) -> Vec<f64> {
        self.g_profile
            .iter()
            .zip(&self.remainder)
            .map(|(g, r)| self.a_eps * (1.0 + 2.0 * g / self.log_d) + r)
            .collect()
    }
}

/// Splits `field` (on a half-disk) into its unit-semicircle average `A`, the
/// conditional-mean profile `A (1 + 2 g / log d)` of a field whose semicircle
/// averages run as a Brownian motion of variance 2 per unit of `-log r` with
/// total variance `log d` at radius 1, and the remainder.
pub fn decompose_rooted_field(field: &GridField, d_eps: f64) -> Result<RootedDecomposition> {
    if !matches!(field.grid.domain, Domain::HalfDisk { .. }) {
        return Err(LqgError::Geometry(format!(
            "rooted decomposition on {:?}",
            field.grid.domain
        )));
    }
    if !(d_eps > 1.0) {
        return Err(LqgError::Geometry(format!("d_eps = {d_eps} must exceed 1")));
    }
    let a = circle_average(field, 0.0.into(), 1.0)?;
    let log_d = d_eps.ln();
    let g: Vec<f64> = field.grid.nodes.iter().map(|z| g_profile(*z)).collect();
    let remainder = field
        .values
        .iter()
        .zip(&g)
        .map(|(v, g)| v - a * (1.0 + 2.0 * g / log_d))
        .collect();
    Ok(RootedDecomposition {
        a_eps: a,
        g_profile: g,
        remainder,
        log_d,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::pt;
    use crate::green::green_halfplane;

    #[test]
    fn circle_average_of_constant_and_sum() {
        let g = Arc::new(Grid::half_disk(2.0, 41).unwrap());
        let f = GridField::constant(g.clone(), 3.5);
        assert!((circle_average(&f, 0.0.into(), 1.0).unwrap() - 3.5).abs() < 1e-12);
        let a = GridField::from_values(g.clone(), g.nodes.iter().map(|z| z.re * z.im).collect());
        let b = GridField::from_values(g.clone(), g.nodes.iter().map(|z| z.norm()).collect());
        let s = GridField::from_values(g.clone(), a.values.iter().zip(&b.values).map(|(x, y)| x + y).collect());
        let c = pt(0.3, 0.6);
        let lhs = circle_average(&s, c, 0.4).unwrap();
        let rhs = circle_average(&a, c, 0.4).unwrap() + circle_average(&b, c, 0.4).unwrap();
        assert!((lhs - rhs).abs() < 1e-12);
        assert!(circle_average(&a, c, 1.5).is_err());
        assert!(circle_average(&a, c, 0.01).is_err());
    }

    #[test]
    fn strip_split_round_trip() {
        let g = Arc::new(Grid::strip(-1.0, 1.0, 8, false).unwrap());
        let vals: Vec<f64> = g.nodes.iter().map(|z| z.re.sin() + (2.0 * z.im).cos() * z.re).collect();
        let f = GridField::from_values(g.clone(), vals.clone());
        let (r, a) = radial_angular_decompose(&f).unwrap();
        let (ncols, ny) = g.shape();
        for i in 0..ncols {
            for j in 0..ny {
                let k = i * ny + j;
                assert!((r[i] + a.values[k] - vals[k]).abs() < 1e-12);
            }
        }
        let lines = GridField::from_values(g.clone(), g.nodes.iter().map(|z| z.re * 2.0).collect());
        let (_, a) = radial_angular_decompose(&lines).unwrap();
        assert!(a.values.iter().all(|v| v.abs() < 1e-12));
        let d = Arc::new(Grid::disk(9, false).unwrap());
        assert!(radial_angular_decompose(&GridField::constant(d, 0.0)).is_err());
    }

    #[test]
    fn seiberg_exponent() {
        let p = GammaParams::new(2f64.sqrt()).unwrap();
        let ins = InsertionSet::boundary_only(&[(p.gamma, pt(-1.0, 0.0)), (p.gamma, -I), (p.gamma, pt(1.0, 0.0))]);
        assert!(ins.s(&p).abs() < 1e-15);
        let p = GammaParams::new(1.5).unwrap();
        let ins = InsertionSet::boundary_only(&[(1.5, pt(-1.0, 0.0)), (1.5, -I), (1.5, pt(1.0, 0.0))]);
        assert!((ins.s(&p) - (2.25 - (0.75 + 4.0 / 3.0))).abs() < 1e-15);
    }

    #[test]
    fn insertion_field_on_disk() {
        let g = Arc::new(Grid::disk(17, true).unwrap());
        let p = GammaParams::new(1.2).unwrap();
        let rho = BackgroundMeasure::uniform_boundary_disk(512);
        let k = GreenKernel::disk_neumann();
        let base = GridField::constant(g.clone(), 0.0);
        // no insertions: only Q m(G(z,.)), which vanishes for this kernel and measure
        let f = build_insertion_field(&base, &InsertionSet::default(), &k, &rho, &p).unwrap();
        assert!(f.values.iter().all(|v| v.abs() < 1e-6));
        let pts = [(p.gamma, pt(-1.0, 0.0)), (p.gamma, -I), (p.gamma, pt(1.0, 0.0))];
        let f = build_insertion_field(&base, &InsertionSet::boundary_only(&pts), &k, &rho, &p).unwrap();
        for (n, z) in g.nodes.iter().enumerate().step_by(7) {
            if f.flagged.contains(&n) {
                continue;
            }
            let direct: f64 = pts
                .iter()
                .map(|(b, s)| 0.5 * b * crate::green::green_disk(*z, *s).unwrap())
                .sum();
            assert!((f.values[n] - direct).abs() < 1e-6, "{z}");
        }
        assert!(!f.flagged.is_empty());
        let dup = InsertionSet::boundary_only(&[(1.0, -I), (1.0, -I)]);
        assert_eq!(
            build_insertion_field(&base, &dup, &k, &rho, &p).unwrap_err(),
            LqgError::CoincidentInsertions
        );
    }

    #[test]
    fn halfplane_profile_at_2i() {
        for gamma in [1.0, 2f64.sqrt(), 1.8] {
            let p = GammaParams::new(gamma).unwrap();
            let z = 2.0 * I;
            let s = 1.5 * gamma - p.q;
            let direct =
                0.5 * gamma * (green_halfplane(z, 0.0.into()).unwrap() + green_halfplane(z, 1.0.into()).unwrap())
                    + 2.0 * s * 2f64.ln();
            assert!((halfplane_insertion_profile(z, &p, 0.01) - direct).abs() < 1e-12);
        }
        // no log(|z| v 1) term when s = 0
        let p = GammaParams::new(2f64.sqrt()).unwrap();
        let z = pt(3.0, 4.0);
        let k = GreenKernel::halfplane();
        let bare = 0.5 * p.gamma * (k.eval_raw(z, 0.0.into()) + k.eval_raw(z, 1.0.into()));
        assert!((halfplane_insertion_profile(z, &p, 0.01) - bare).abs() < 1e-12);
    }

    #[test]
    fn profile_constant_is_zero_in_the_continuum() {
        // the semicircle mean of G_H(., 0) + G_H(., 1) vanishes, so the constant does too
        let n = 200000;
        let mut acc = 0.0;
        for i in 0..n {
            let z = Point::from_polar(1.0, PI * (i as f64 + 0.5) / n as f64);
            acc += green_halfplane(z, 0.0.into()).unwrap() + green_halfplane(z, 1.0.into()).unwrap();
        }
        assert!((acc / n as f64).abs() < 1e-4);
    }

    #[test]
    fn rooted_decomposition_identities() {
        let g = Arc::new(Grid::half_disk(4.0, 41).unwrap());
        let vals: Vec<f64> = g.nodes.iter().map(|z| 1.0 + z.re * 0.3 - z.norm()).collect();
        let f = GridField::from_values(g.clone(), vals.clone());
        let d = decompose_rooted_field(&f, 50.0).unwrap();
        for (a, b) in d.reassemble().iter().zip(&vals) {
            assert!((a - b).abs() < 1e-12);
        }
        let zero = GridField::from_values(g.clone(), g.nodes.iter().map(|z| z.re).collect());
        assert!(decompose_rooted_field(&zero, 50.0).unwrap().a_eps.abs() < 1e-9);
        assert!(d.g_profile.iter().zip(&g.nodes).all(|(v, z)| if z.norm() <= 1.0 {
            *v == 0.0
        } else {
            (*v + z.norm().ln()).abs() < 1e-15
        }));
    }
}
