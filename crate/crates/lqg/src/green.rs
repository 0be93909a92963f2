//! Green's kernels in closed form, their background-measure (mean-zero)
//! modifications, regularized diagonals and the lattice self-energy constants.

use std::f64::consts::PI;
use std::sync::OnceLock;

use crate::error::{LqgError, Result};
use crate::geometry::{Domain, Point};
use crate::quad;

fn check_distinct(x: Point, y: Point) -> Result<()> {
    if x == y {
        Err(LqgError::Diagonal)
    } else {
        Ok(())
    }
}

/// Free (Neumann) kernel of the unit disk, `-log(|x - y| |1 - x conj(y)|)`.
pub fn green_disk(x: Point, y: Point) -> Result<f64> {
    check_distinct(x, y)?;
    Ok(disk_neumann(x, y))
}

/// Zero boundary kernel of the unit disk, `-log|x - y| + log|1 - x conj(y)|`.
pub fn green_disk_dirichlet(x: Point, y: Point) -> Result<f64> {
    check_distinct(x, y)?;
    Ok(disk_dirichlet(x, y))
}

/// `-log(|x - y| |x - conj(y)|)`.
pub fn green_halfplane(x: Point, y: Point) -> Result<f64> {
    check_distinct(x, y)?;
    Ok(halfplane(x, y))
}

/// Kernel of the half-disk of radius `1/sqrt(eps)`: free on the diameter, zero on the arc.
pub fn green_halfdisk(x: Point, y: Point, eps: f64) -> Result<f64> {
    check_distinct(x, y)?;
    if !(eps > 0.0) {
        return Err(LqgError::Domain(format!("eps = {eps}")));
    }
    Ok(halfdisk(x, y, 1.0 / eps.sqrt()))
}

fn disk_neumann(x: Point, y: Point) -> f64 {
    -((x - y).norm() * (1.0 - x * y.conj()).norm()).ln()
}

fn disk_dirichlet(x: Point, y: Point) -> f64 {
    -(x - y).norm().ln() + (1.0 - x * y.conj()).norm().ln()
}

fn halfplane(x: Point, y: Point) -> f64 {
    -((x - y).norm() * (x - y.conj()).norm()).ln()
}

fn halfdisk(x: Point, y: Point, radius: f64) -> f64 {
    let r2 = radius * radius;
    -((x - y).norm() * (x - y.conj()).norm()).ln() + ((r2 - x * y).norm() * (r2 - x * y.conj()).norm()).ln()
        - 2.0 * radius.ln()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BoundaryCondition {
    Dirichlet,
    Neumann,
    /// Free on the straight part of the boundary, zero elsewhere.
    Mixed,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum KernelKind {
    DiskNeumann,
    DiskDirichlet,
    HalfPlane,
    HalfDisk { radius: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GreenKernel {
    pub kind: KernelKind,
}

impl GreenKernel {
    pub fn disk_neumann() -> Self {
        GreenKernel {
            kind: KernelKind::DiskNeumann,
        }
    }
    pub fn disk_dirichlet() -> Self {
        GreenKernel {
            kind: KernelKind::DiskDirichlet,
        }
    }
    pub fn halfplane() -> Self {
        GreenKernel {
            kind: KernelKind::HalfPlane,
        }
    }
    pub fn halfdisk(radius: f64) -> Self {
        GreenKernel {
            kind: KernelKind::HalfDisk { radius },
        }
    }

    pub fn domain(&self) -> Domain {
        match self.kind {
            KernelKind::DiskNeumann | KernelKind::DiskDirichlet => Domain::UnitDisk,
            KernelKind::HalfPlane => Domain::UpperHalfPlane,
            KernelKind::HalfDisk { radius } => Domain::HalfDisk { radius },
        }
    }

    pub fn boundary_condition(&self) -> BoundaryCondition {
        match self.kind {
            KernelKind::DiskNeumann | KernelKind::HalfPlane => BoundaryCondition::Neumann,
            KernelKind::DiskDirichlet => BoundaryCondition::Dirichlet,
            KernelKind::HalfDisk { .. } => BoundaryCondition::Mixed,
        }
    }

    pub fn evaluate(&self, x: Point, y: Point) -> Result<f64> {
        check_distinct(x, y)?;
        Ok(self.eval_raw(x, y))
    }

    /// No diagonal check; infinite at `x == y`.
    #[inline]
    pub fn eval_raw(&self, x: Point, y: Point) -> f64 {
        match self.kind {
            KernelKind::DiskNeumann => disk_neumann(x, y),
            KernelKind::DiskDirichlet => disk_dirichlet(x, y),
            KernelKind::HalfPlane => halfplane(x, y),
            KernelKind::HalfDisk { radius } => halfdisk(x, y, radius),
        }
    }

    /// `lim_{w -> z} G(z, w) + log|z - w|` for interior `z`.
    pub fn regularized_diagonal(&self, z: Point) -> f64 {
        match self.kind {
            KernelKind::DiskNeumann => -(1.0 - z.norm_sqr()).ln(),
            KernelKind::DiskDirichlet => (1.0 - z.norm_sqr()).ln(),
            KernelKind::HalfPlane => -(2.0 * z.im).ln(),
            KernelKind::HalfDisk { radius } => {
                let r2 = radius * radius;
                -(2.0 * z.im).ln() + (r2 - z * z).norm().ln() + (r2 - z.norm_sqr()).ln() - 2.0 * radius.ln()
            }
        }
    }

    /// Whether `z` lies on the free part of the boundary.
    pub fn on_free_boundary(&self, z: Point, tol: f64) -> bool {
        match self.kind {
            KernelKind::DiskNeumann => (z.norm() - 1.0).abs() <= tol,
            KernelKind::DiskDirichlet => false,
            KernelKind::HalfPlane => z.im.abs() <= tol,
            KernelKind::HalfDisk { radius } => z.im.abs() <= tol && z.re.abs() < radius,
        }
    }

    /// `lim G(z, w) + 2 log|z - w|` along the free boundary, `None` off it.
    pub fn boundary_diagonal(&self, z: Point) -> Option<f64> {
        if !self.on_free_boundary(z, 1e-12) {
            return None;
        }
        match self.kind {
            KernelKind::DiskNeumann | KernelKind::HalfPlane => Some(0.0),
            KernelKind::DiskDirichlet => None,
            KernelKind::HalfDisk { radius } => {
                let r2 = radius * radius;
                Some(2.0 * (r2 - z.re * z.re).ln() - 2.0 * radius.ln())
            }
        }
    }
}

/// `E[-log|U - V|]` for `U, V` independent uniform on the unit square.
pub fn self_energy_bulk() -> f64 {
    static K: OnceLock<f64> = OnceLock::new();
    *K.get_or_init(|| {
        // difference density (1-|a|)(1-|b|) on [-1,1]^2, folded to the first quadrant
        let mut outer = |a: f64| {
            let mut inner = |b: f64| (1.0 - b) * (-0.5 * (a * a + b * b).ln());
            (1.0 - a) * quad::integrate_graded(&mut inner, 0.0, 1.0)
        };
        4.0 * quad::integrate_graded(&mut outer, 0.0, 1.0)
    })
}

/// `E[-log|U - V| - log|U - conj(V)|]` for `U, V` independent uniform on the
/// half square `[-1/2, 1/2] x [0, 1/2]`.
pub fn self_energy_boundary() -> f64 {
    static K: OnceLock<f64> = OnceLock::new();
    *K.get_or_init(|| {
        // horizontal difference: density 1-|a| on [-1,1]; vertical: U[0,1/2] - U[-1/2,1/2],
        // trapezoid on [-1/2, 1], height 2 on [0, 1/2].
        let fb = |b: f64| {
            if !(-0.5..=1.0).contains(&b) {
                0.0
            } else if b < 0.0 {
                2.0 * (b + 0.5)
            } else if b <= 0.5 {
                1.0
            } else {
                2.0 * (1.0 - b)
            }
        };
        let mut outer = |a: f64| {
            let g = |b: f64| fb(b) * (-0.5 * (a * a + b * b).ln());
            let mut neg = |b: f64| g(-b);
            let mut pos = |b: f64| g(b);
            let lower = quad::integrate_graded(&mut neg, 0.0, 0.5);
            let upper = quad::integrate_graded(&mut pos, 0.0, 0.5) + quad::integrate(&mut pos, 0.5, 1.0, 8);
            (1.0 - a) * (lower + upper)
        };
        // two reflected terms, each averaging over half of the vertical range
        2.0 * 2.0 * quad::integrate_graded(&mut outer, 0.0, 1.0)
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MeasureKind {
    UniformBoundary,
    UniformBulk,
    Custom,
}

#[derive(Clone, Debug, PartialEq)]
enum Support {
    /// equal-angle cells of `center + radius e^{i phi}`, `phi in [from, to]`
    Arc {
        center: Point,
        radius: f64,
        from: f64,
        to: f64,
    },
    /// equal cells of the segment `[a, b]`
    Segment {
        a: Point,
        b: Point,
    },
    /// polar cells of the disk of `radius`, `nr` rings by `na` sectors
    Polar {
        radius: f64,
        nr: usize,
        na: usize,
    },
    Discrete,
}

/// A probability measure `rho` represented by cells with one node each; kernel
/// averages against it resolve the log singularity inside nearby cells.
#[derive(Clone, Debug, PartialEq)]
pub struct BackgroundMeasure {
    pub domain: Domain,
    pub kind: MeasureKind,
    pub nodes: Vec<Point>,
    pub weights: Vec<f64>,
    support: Support,
}

const MIN_CURVE_NODES: usize = 512;

impl BackgroundMeasure {
    /// Uniform probability measure on the unit circle.
    pub fn uniform_boundary_disk(n: usize) -> BackgroundMeasure {
        let n = n.max(MIN_CURVE_NODES);
        BackgroundMeasure::arc(
            Domain::UnitDisk,
            MeasureKind::UniformBoundary,
            0.0.into(),
            1.0,
            0.0,
            2.0 * PI,
            n,
        )
    }

    /// Uniform probability measure on the unit semicircle `∂D ∩ H`, for kernels on
    /// `domain` (the half-plane or a half-disk containing it).
    pub fn uniform_semicircle(domain: Domain, n: usize) -> Result<BackgroundMeasure> {
        match domain {
            Domain::UpperHalfPlane => {}
            Domain::HalfDisk { radius } if radius >= 1.0 => {}
            _ => {
                return Err(LqgError::Quadrature(format!(
                    "semicircle measure not supported on {domain:?}"
                )))
            }
        }
        let n = n.max(MIN_CURVE_NODES);
        Ok(BackgroundMeasure::arc(
            domain,
            MeasureKind::Custom,
            0.0.into(),
            1.0,
            0.0,
            PI,
            n,
        ))
    }

    /// Uniform probability measure on the diameter `[-r, r]` of a half-disk.
    pub fn uniform_diameter(radius: f64, n: usize) -> BackgroundMeasure {
        let n = n.max(MIN_CURVE_NODES);
        let a = Point::new(-radius, 0.0);
        let b = Point::new(radius, 0.0);
        let nodes = (0..n).map(|k| a + (b - a) * ((k as f64 + 0.5) / n as f64)).collect();
        BackgroundMeasure {
            domain: Domain::HalfDisk { radius },
            kind: MeasureKind::UniformBoundary,
            nodes,
            weights: vec![1.0 / n as f64; n],
            support: Support::Segment { a, b },
        }
    }

    /// Normalized Lebesgue measure on the unit disk.
    pub fn uniform_bulk_disk(nr: usize, na: usize) -> BackgroundMeasure {
        let mut nodes = Vec::with_capacity(nr * na);
        let mut weights = Vec::with_capacity(nr * na);
        for i in 0..nr {
            let (ra, rb) = (i as f64 / nr as f64, (i + 1) as f64 / nr as f64);
            let rm = (0.5 * (ra * ra + rb * rb)).sqrt();
            for j in 0..na {
                let phi = 2.0 * PI * (j as f64 + 0.5) / na as f64;
                nodes.push(Point::from_polar(rm, phi));
                weights.push((rb * rb - ra * ra) / na as f64);
            }
        }
        BackgroundMeasure {
            domain: Domain::UnitDisk,
            kind: MeasureKind::UniformBulk,
            nodes,
            weights,
            support: Support::Polar { radius: 1.0, nr, na },
        }
    }

    /// Point masses.
    pub fn custom(domain: Domain, nodes: Vec<Point>, weights: Vec<f64>) -> Result<BackgroundMeasure> {
        if nodes.len() != weights.len() || nodes.is_empty() {
            return Err(LqgError::Quadrature("node and weight counts differ or are zero".into()));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(LqgError::Quadrature("weights must be finite and nonnegative".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(LqgError::Quadrature(format!("weights sum to {total}")));
        }
        if let Some(z) = nodes.iter().find(|z| !domain.contains(**z, 1e-12)) {
            return Err(LqgError::Quadrature(format!("node {z} outside {domain:?}")));
        }
        Ok(BackgroundMeasure {
            domain,
            kind: MeasureKind::Custom,
            nodes,
            weights,
            support: Support::Discrete,
        })
    }

    fn arc(
        domain: Domain,
        kind: MeasureKind,
        center: Point,
        radius: f64,
        from: f64,
        to: f64,
        n: usize,
    ) -> BackgroundMeasure {
        let nodes = (0..n)
            .map(|k| center + Point::from_polar(radius, from + (to - from) * (k as f64 + 0.5) / n as f64))
            .collect();
        BackgroundMeasure {
            domain,
            kind,
            nodes,
            weights: vec![1.0 / n as f64; n],
            support: Support::Arc {
                center,
                radius,
                from,
                to,
            },
        }
    }

    /// `sum_k w_k f(node_k)`, for integrands that are smooth on the support.
    pub fn average(&self, f: impl Fn(Point) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(z, w)| w * f(*z)).sum()
    }

    /// `m_rho(G(x, .))`, resolving the singularity at `x`.
    pub fn mean_kernel(&self, kernel: &GreenKernel, x: Point) -> Result<f64> {
        let n = self.nodes.len();
        let mut acc = 0.0;
        match self.support {
            Support::Discrete => {
                for k in 0..n {
                    if self.nodes[k] == x {
                        return Err(LqgError::Diagonal);
                    }
                    acc += self.weights[k] * kernel.eval_raw(x, self.nodes[k]);
                }
            }
            Support::Arc {
                center,
                radius,
                from,
                to,
            } => {
                let dphi = (to - from) / n as f64;
                let near = 8.0 * radius * dphi;
                let rel = x - center;
                for k in 0..n {
                    let z = self.nodes[k];
                    let a = from + k as f64 * dphi;
                    if (z - x).norm() > near {
                        let (gx, gw) = gl3();
                        let v: f64 = gx
                            .iter()
                            .zip(gw)
                            .map(|(t, w)| {
                                w * kernel.eval_raw(x, center + Point::from_polar(radius, a + 0.5 * dphi * (1.0 + t)))
                            })
                            .sum();
                        acc += self.weights[k] * 0.5 * v;
                        continue;
                    }
                    let b = a + dphi;
                    let mid = a + 0.5 * dphi;
                    let phi_x = mid + (rel.arg() - mid + PI).rem_euclid(2.0 * PI) - PI;
                    let mut f = |phi: f64| kernel.eval_raw(x, center + Point::from_polar(radius, phi));
                    acc += self.weights[k] * quad::integrate_split(&mut f, a, b, phi_x) / dphi;
                }
            }
            Support::Segment { a, b } => {
                let len = (b - a).norm();
                let ds = 1.0 / n as f64;
                let near = 8.0 * len * ds;
                let dir = (b - a) / len;
                let s_x = ((x - a) * dir.conj()).re / len;
                for k in 0..n {
                    let z = self.nodes[k];
                    let lo = k as f64 * ds;
                    if (z - x).norm() > near {
                        let (gx, gw) = gl3();
                        let v: f64 = gx
                            .iter()
                            .zip(gw)
                            .map(|(t, w)| w * kernel.eval_raw(x, a + (b - a) * (lo + 0.5 * ds * (1.0 + t))))
                            .sum();
                        acc += self.weights[k] * 0.5 * v;
                        continue;
                    }
                    let mut f = |s: f64| kernel.eval_raw(x, a + (b - a) * s);
                    acc += self.weights[k] * quad::integrate_split(&mut f, lo, lo + ds, s_x) / ds;
                }
            }
            Support::Polar { radius, nr, na } => {
                let dr = radius / nr as f64;
                let da = 2.0 * PI / na as f64;
                let (rx, ax) = (x.norm(), x.arg());
                for i in 0..nr {
                    let ra = i as f64 * dr;
                    let rb = ra + dr;
                    let size = dr.max(rb * da);
                    for j in 0..na {
                        let k = i * na + j;
                        let z = self.nodes[k];
                        let d = (z - x).norm();
                        if d > 6.0 * size {
                            // 3 x 3 Gauss-Legendre in (r, phi)
                            let (gx, gw) = gl3();
                            let mut v = 0.0;
                            for (xa, wa) in gx.iter().zip(gw) {
                                let r = ra + 0.5 * dr * (1.0 + xa);
                                for (xb, wb) in gx.iter().zip(gw) {
                                    let phi = j as f64 * da + 0.5 * da * (1.0 + xb);
                                    v += wa * wb * r * kernel.eval_raw(x, Point::from_polar(r, phi));
                                }
                            }
                            acc += 0.25 * dr * da * v / (PI * radius * radius);
                            continue;
                        }
                        let a0 = j as f64 * da;
                        let mid = a0 + 0.5 * da;
                        let a_x = mid + (ax - mid + PI).rem_euclid(2.0 * PI) - PI;
                        let mut radial = |r: f64| {
                            let mut ang = |phi: f64| kernel.eval_raw(x, Point::from_polar(r, phi));
                            let v = if d < 2.0 * size {
                                quad::integrate_split(&mut ang, a0, a0 + da, a_x)
                            } else {
                                quad::integrate(&mut ang, a0, a0 + da, 2)
                            };
                            r * v
                        };
                        let v = if d < 2.0 * size {
                            quad::integrate_split(&mut radial, ra, rb, rx)
                        } else {
                            quad::integrate(&mut radial, ra, rb, 2)
                        };
                        acc += v / (PI * radius * radius);
                    }
                }
            }
        }
        Ok(acc)
    }
}

fn gl3() -> &'static (Vec<f64>, Vec<f64>) {
    static R: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    R.get_or_init(|| quad::gauss_legendre(3))
}

/// A kernel made mean-zero against a background measure:
/// `G(x,y) - m(G(x,.)) - m(G(.,y)) + theta`.
#[derive(Clone, Debug)]
pub struct RhoKernel {
    pub kernel: GreenKernel,
    pub rho: BackgroundMeasure,
    pub theta: f64,
}

impl RhoKernel {
    pub fn new(kernel: GreenKernel, rho: BackgroundMeasure) -> Result<RhoKernel> {
        if !rho.domain.compatible(&kernel.domain()) {
            return Err(LqgError::Quadrature(format!(
                "measure on {:?} incompatible with kernel on {:?}",
                rho.domain,
                kernel.domain()
            )));
        }
        let total: f64 = rho.weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 || rho.weights.iter().any(|w| *w < 0.0) {
            return Err(LqgError::Quadrature(format!("weights sum to {total}")));
        }
        let mut theta = 0.0;
        if rho.support == Support::Discrete {
            // point masses: self pairs enter through the regularized diagonal
            for (a, (za, wa)) in rho.nodes.iter().zip(&rho.weights).enumerate() {
                for (b, (zb, wb)) in rho.nodes.iter().zip(&rho.weights).enumerate() {
                    theta += wa
                        * wb
                        * if a == b {
                            kernel
                                .boundary_diagonal(*za)
                                .unwrap_or_else(|| kernel.regularized_diagonal(*za))
                        } else {
                            kernel.evaluate(*za, *zb)?
                        };
                }
            }
        } else {
            for (z, w) in rho.nodes.iter().zip(&rho.weights) {
                theta += w * rho.mean_kernel(&kernel, *z)?;
            }
        }
        Ok(RhoKernel { kernel, rho, theta })
    }

    pub fn mean(&self, x: Point) -> Result<f64> {
        self.rho.mean_kernel(&self.kernel, x)
    }

    pub fn evaluate(&self, x: Point, y: Point) -> Result<f64> {
        Ok(self.kernel.evaluate(x, y)? - self.mean(x)? - self.mean(y)? + self.theta)
    }
}

pub fn green_rho(kernel: &GreenKernel, rho: &BackgroundMeasure, x: Point, y: Point) -> Result<f64> {
    check_distinct(x, y)?;
    RhoKernel::new(*kernel, rho.clone())?.evaluate(x, y)
}
