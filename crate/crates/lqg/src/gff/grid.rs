//! Lattices over the supported domains, cell areas, boundary edges and
//! bilinear interpolation.

use std::f64::consts::PI;

use crate::error::{LqgError, Result};
use crate::geometry::{pt, Domain, Point};

const NONE: usize = usize::MAX;

/// A rectangular lattice `x0 + i hx`, `y0 + j hy`; `index[i * ny + j]` is the
/// node at `(i, j)` or `usize::MAX`.
#[derive(Clone, Debug)]
pub struct Lattice {
    pub x0: f64,
    pub y0: f64,
    pub hx: f64,
    pub hy: f64,
    pub nx: usize,
    pub ny: usize,
    pub index: Vec<usize>,
}

impl Lattice {
    pub fn at(&self, i: isize, j: isize) -> Option<usize> {
        if i < 0 || j < 0 || i as usize >= self.nx || j as usize >= self.ny {
            return None;
        }
        let k = self.index[i as usize * self.ny + j as usize];
        (k != NONE).then_some(k)
    }

    pub fn point(&self, i: usize, j: usize) -> Point {
        pt(self.x0 + i as f64 * self.hx, self.y0 + j as f64 * self.hy)
    }
}

/// Boundary nodes equally spaced on the unit circle, stored after the interior nodes.
#[derive(Clone, Debug)]
pub struct CircleNodes {
    pub first: usize,
    pub count: usize,
}

#[derive(Clone, Debug)]
pub struct Grid {
    /// Cache key: identical ids mean identical node sets.
    pub id: String,
    pub domain: Domain,
    pub nodes: Vec<Point>,
    /// Bulk cell area attached to each node.
    pub area: Vec<f64>,
    /// Free-boundary edge length attached to each node, 0 off the free boundary.
    pub edge: Vec<f64>,
    /// Where the bulk regularized diagonal is evaluated for each cell.
    pub bulk_ref: Vec<Point>,
    /// Boundary pieces where the field vanishes.
    pub dirichlet_edges: Vec<(Point, f64)>,
    pub spacing: f64,
    pub lattice: Option<Lattice>,
    pub circle: Option<CircleNodes>,
}

/// Area of the square of side `h` centred at `c` inside `{z : inside(z)}`,
/// by a 24 x 24 midpoint rule.
fn clipped_area(c: Point, h: f64, inside: &dyn Fn(Point) -> bool) -> f64 {
    const S: usize = 24;
    let mut count = 0usize;
    for a in 0..S {
        for b in 0..S {
            let z = c + pt((a as f64 + 0.5) / S as f64 - 0.5, (b as f64 + 0.5) / S as f64 - 0.5) * h;
            if inside(z) {
                count += 1;
            }
        }
    }
    h * h * count as f64 / (S * S) as f64
}

impl Grid {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn is_free(&self, k: usize) -> bool {
        self.edge[k] > 0.0
    }

    pub fn boundary_length(&self) -> f64 {
        self.edge.iter().sum::<f64>() + self.dirichlet_edges.iter().map(|e| e.1).sum::<f64>()
    }

    pub fn total_area(&self) -> f64 {
        self.area.iter().sum()
    }

    /// Unit disk sampled on the lattice `-1 + i h`, `h = 2/(n-1)`. With `free`
    /// the circle carries `round(2 pi / h)` boundary nodes and interior nodes stop
    /// at radius `1 - h/2`; otherwise the field vanishes on the circle.
    pub fn disk(n: usize, free: bool) -> Result<Grid> {
        if n < 5 || n.is_multiple_of(2) {
            return Err(LqgError::Geometry(format!(
                "disk lattice size {n} must be odd and >= 5"
            )));
        }
        let h = 2.0 / (n - 1) as f64;
        let r_in = if free { 1.0 - 0.5 * h } else { 1.0 };
        let inside = move |z: Point| z.norm() < r_in;
        let mut lat = Lattice {
            x0: -1.0,
            y0: -1.0,
            hx: h,
            hy: h,
            nx: n,
            ny: n,
            index: vec![NONE; n * n],
        };
        // lattice points closer than h/2 to a zero boundary carry no node
        let r_node = if free { r_in } else { 1.0 - 0.5 * h };
        let mut nodes = Vec::new();
        let mut area = Vec::new();
        for i in 0..n {
            for j in 0..n {
                let z = lat.point(i, j);
                if z.norm() < r_node - 1e-12 {
                    lat.index[i * n + j] = nodes.len();
                    nodes.push(z);
                    area.push(0.0);
                }
            }
        }
        // clipped cell areas; cells whose centre falls outside hand their share to a neighbour
        for i in 0..n {
            for j in 0..n {
                let c = lat.point(i, j);
                let far = c.norm() + h;
                let near = c.norm() - h;
                let a = if far < r_in {
                    h * h
                } else if near > r_in {
                    0.0
                } else {
                    clipped_area(c, h, &inside)
                };
                if a == 0.0 {
                    continue;
                }
                let owner = lat
                    .at(i as isize, j as isize)
                    .or_else(|| nearest_lattice_neighbour(&lat, i, j));
                if let Some(k) = owner {
                    area[k] += a;
                }
            }
        }
        let bulk_ref = nodes.clone();
        let mut edge = vec![0.0; nodes.len()];
        let mut dirichlet_edges = Vec::new();
        let mut circle = None;
        let mut bulk_ref = bulk_ref;
        if free {
            let m = (2.0 * PI / h).round() as usize;
            let first = nodes.len();
            let ring = PI * (1.0 - r_in * r_in) / m as f64;
            for k in 0..m {
                let th = 2.0 * PI * k as f64 / m as f64;
                nodes.push(Point::from_polar(1.0, th));
                area.push(ring);
                edge.push(2.0 * PI / m as f64);
                bulk_ref.push(Point::from_polar(1.0 - 0.25 * h, th));
            }
            circle = Some(CircleNodes { first, count: m });
        } else {
            let m = 4 * n;
            for k in 0..m {
                dirichlet_edges.push((
                    Point::from_polar(1.0, 2.0 * PI * (k as f64 + 0.5) / m as f64),
                    2.0 * PI / m as f64,
                ));
            }
        }
        // remove the sampling error of the clipped areas so totals are exact
        let total: f64 = area.iter().sum();
        let scale = PI / total;
        area.iter_mut().for_each(|a| *a *= scale);
        Ok(Grid {
            id: format!("disk-{}-{n}", if free { "free" } else { "zero" }),
            domain: Domain::UnitDisk,
            nodes,
            area,
            edge,
            bulk_ref,
            dirichlet_edges,
            spacing: h,
            lattice: Some(lat),
            circle,
        })
    }

    /// Half-disk of `radius`, `n` lattice points across the diameter. The diameter
    /// row is free, the arc carries zero boundary values.
    pub fn half_disk(radius: f64, n: usize) -> Result<Grid> {
        if n < 5 || n.is_multiple_of(2) || !(radius > 0.0) {
            return Err(LqgError::Geometry(format!(
                "half-disk lattice size {n}, radius {radius}"
            )));
        }
        let h = 2.0 * radius / (n - 1) as f64;
        let ny = (n - 1) / 2 + 1;
        let inside = move |z: Point| z.norm() < radius && z.im >= 0.0;
        let mut lat = Lattice {
            x0: -radius,
            y0: 0.0,
            hx: h,
            hy: h,
            nx: n,
            ny,
            index: vec![NONE; n * ny],
        };
        let mut nodes = Vec::new();
        let mut area = Vec::new();
        let mut edge = Vec::new();
        let mut bulk_ref = Vec::new();
        for i in 0..n {
            for j in 0..ny {
                let z = lat.point(i, j);
                if z.norm() < radius - 0.5 * h - 1e-12 * radius {
                    lat.index[i * ny + j] = nodes.len();
                    nodes.push(z);
                    area.push(0.0);
                    edge.push(if j == 0 { h } else { 0.0 });
                    bulk_ref.push(if j == 0 { pt(z.re, 0.25 * h) } else { z });
                }
            }
        }
        for i in 0..n {
            for j in 0..ny {
                let c = lat.point(i, j);
                let a = if c.norm() + h < radius {
                    if j == 0 {
                        0.5 * h * h
                    } else {
                        h * h
                    }
                } else if c.norm() - h > radius {
                    0.0
                } else {
                    clipped_area(c, h, &inside)
                };
                if a == 0.0 {
                    continue;
                }
                let owner = lat
                    .at(i as isize, j as isize)
                    .or_else(|| nearest_lattice_neighbour(&lat, i, j));
                if let Some(k) = owner {
                    area[k] += a;
                }
            }
        }
        let total: f64 = area.iter().sum();
        let scale = 0.5 * PI * radius * radius / total;
        area.iter_mut().for_each(|a| *a *= scale);
        let m = 4 * n;
        let mut dirichlet_edges: Vec<(Point, f64)> = (0..m)
            .map(|k| {
                (
                    Point::from_polar(radius, PI * (k as f64 + 0.5) / m as f64),
                    PI * radius / m as f64,
                )
            })
            .collect();
        dirichlet_edges.push((pt(-radius + 0.25 * h, 0.0), 0.5 * h));
        dirichlet_edges.push((pt(radius - 0.25 * h, 0.0), 0.5 * h));
        Ok(Grid {
            id: format!("halfdisk-{radius:.17e}-{n}"),
            domain: Domain::HalfDisk { radius },
            nodes,
            area,
            edge,
            bulk_ref,
            dirichlet_edges,
            spacing: h,
            lattice: Some(lat),
            circle: None,
        })
    }

    /// Strip lattice with `m + 1` rows `y_j = j pi / m` and columns spaced `pi / m`
    /// covering `[t_lo, t_hi]`. With `zero_left` the field vanishes at `t_lo`
    /// (which carries no column) and the domain is the half-strip.
    pub fn strip(t_lo: f64, t_hi: f64, m: usize, zero_left: bool) -> Result<Grid> {
        if m < 2 || !(t_hi > t_lo) {
            return Err(LqgError::Geometry(format!(
                "strip window [{t_lo}, {t_hi}] with {m} rows"
            )));
        }
        let dt = PI / m as f64;
        let ncols = ((t_hi - t_lo) / dt).round() as usize + if zero_left { 0 } else { 1 };
        let first = if zero_left { t_lo + dt } else { t_lo };
        let ny = m + 1;
        let n = ncols * ny;
        let mut nodes = Vec::with_capacity(n);
        let mut area = Vec::with_capacity(n);
        let mut edge = Vec::with_capacity(n);
        let mut bulk_ref = Vec::with_capacity(n);
        for i in 0..ncols {
            let t = first + i as f64 * dt;
            // end columns own half cells
            let wx = if i + 1 == ncols || (i == 0 && !zero_left) {
                0.5 * dt
            } else {
                dt
            };
            for j in 0..ny {
                let y = j as f64 * dt;
                nodes.push(pt(t, y));
                let boundary = j == 0 || j == m;
                area.push(wx * if boundary { 0.5 * dt } else { dt });
                edge.push(if boundary { wx } else { 0.0 });
                bulk_ref.push(if j == 0 {
                    pt(t, 0.25 * dt)
                } else if j == m {
                    pt(t, PI - 0.25 * dt)
                } else {
                    pt(t, y)
                });
            }
        }
        let lat = Lattice {
            x0: first,
            y0: 0.0,
            hx: dt,
            hy: dt,
            nx: ncols,
            ny,
            index: (0..n).collect(),
        };
        let mut dirichlet_edges = Vec::new();
        if zero_left {
            dirichlet_edges.push((pt(t_lo, 0.5 * PI), PI));
            dirichlet_edges.push((pt(t_lo + 0.25 * dt, 0.0), 0.5 * dt));
            dirichlet_edges.push((pt(t_lo + 0.25 * dt, PI), 0.5 * dt));
        }
        let domain = if zero_left {
            Domain::HalfStrip { left: t_lo }
        } else {
            Domain::Strip
        };
        Ok(Grid {
            id: format!("strip-{t_lo:.17e}-{t_hi:.17e}-{m}-{zero_left}"),
            domain,
            nodes,
            area,
            edge,
            bulk_ref,
            dirichlet_edges,
            spacing: dt,
            lattice: Some(lat),
            circle: None,
        })
    }

    /// Strip-lattice shape `(columns, rows)`.
    pub fn shape(&self) -> (usize, usize) {
        self.lattice.as_ref().map(|l| (l.nx, l.ny)).unwrap_or((self.len(), 1))
    }

    /// Nearest node, if `w` is covered by the grid.
    pub fn locate(&self, w: Point) -> Option<usize> {
        if let Some(c) = &self.circle {
            if w.norm() > 1.0 - 0.75 * self.spacing {
                let k = ((w.arg().rem_euclid(2.0 * PI)) / (2.0 * PI) * c.count as f64).round() as usize % c.count;
                return Some(c.first + k);
            }
        }
        let lat = self.lattice.as_ref()?;
        let i = ((w.re - lat.x0) / lat.hx).round() as isize;
        let j = ((w.im - lat.y0) / lat.hy).round() as isize;
        lat.at(i, j)
    }

    /// Interpolation weights `(node, weight)` at `w`. Lattice corners outside the
    /// grid count as zero boundary values, except next to a free circle, where
    /// the two bracketing circle nodes and the present corners are blended by
    /// inverse squared distance.
    pub fn interp_stencil(&self, w: Point) -> Vec<(usize, f64)> {
        let Some(lat) = self.lattice.as_ref() else {
            return self.locate(w).map(|k| vec![(k, 1.0)]).unwrap_or_default();
        };
        let fx = (w.re - lat.x0) / lat.hx;
        let fy = (w.im - lat.y0) / lat.hy;
        let tol = 1e-9;
        if fx < -1.0 - tol || fy < -tol || fx > lat.nx as f64 - 1.0 + tol || fy > lat.ny as f64 - 1.0 + tol {
            return Vec::new();
        }
        if fx < -tol && !matches!(self.domain, Domain::HalfStrip { .. }) {
            return Vec::new();
        }
        let i = (fx.floor() as isize).clamp(-1, lat.nx as isize - 2);
        let j = (fy.floor() as isize).clamp(0, lat.ny as isize - 2);
        let ax = fx - i as f64;
        let ay = fy - j as f64;
        let corners = [
            (i, j, (1.0 - ax) * (1.0 - ay)),
            (i + 1, j, ax * (1.0 - ay)),
            (i, j + 1, (1.0 - ax) * ay),
            (i + 1, j + 1, ax * ay),
        ];
        let mut out = Vec::with_capacity(4);
        let mut missing = false;
        for (ci, cj, c) in corners {
            match lat.at(ci, cj) {
                Some(k) => {
                    if c != 0.0 {
                        out.push((k, c));
                    }
                }
                None => missing |= c > 0.0,
            }
        }
        if missing {
            if let Some(circ) = &self.circle {
                let mut cand: Vec<usize> = [(i, j), (i + 1, j), (i, j + 1), (i + 1, j + 1)]
                    .iter()
                    .filter_map(|&(a, b)| lat.at(a, b))
                    .collect();
                let pos = w.arg().rem_euclid(2.0 * PI) / (2.0 * PI) * circ.count as f64;
                let k0 = pos.floor() as usize % circ.count;
                cand.push(circ.first + k0);
                cand.push(circ.first + (k0 + 1) % circ.count);
                let mut ws: Vec<(usize, f64)> = Vec::with_capacity(cand.len());
                for k in cand {
                    let d2 = (self.nodes[k] - w).norm_sqr();
                    if d2 < 1e-24 {
                        return vec![(k, 1.0)];
                    }
                    ws.push((k, 1.0 / d2));
                }
                let total: f64 = ws.iter().map(|x| x.1).sum();
                ws.iter_mut().for_each(|x| x.1 /= total);
                return ws;
            }
        }
        if out.is_empty() && !self.domain.contains(w, 1e-12) {
            return Vec::new();
        }
        out
    }

    /// Interpolated value of `values` at `w`; `None` outside the grid.
    pub fn interpolate(&self, values: &[f64], w: Point) -> Option<f64> {
        let s = self.interp_stencil(w);
        if s.is_empty() {
            // strips are windows: nothing is known beyond the lattice
            let zero_edge = matches!(self.domain, Domain::HalfStrip { left } if (w.re - left).abs() < 1e-9);
            let windowed = matches!(self.domain, Domain::Strip | Domain::HalfStrip { .. });
            if !self.domain.contains(w, 1e-12) || (windowed && !zero_edge) {
                return None;
            }
        }
        Some(s.iter().map(|&(k, c)| c * values[k]).sum())
    }
}

fn nearest_lattice_neighbour(lat: &Lattice, i: usize, j: usize) -> Option<usize> {
    let c = lat.point(i, j);
    let mut best = None;
    let mut best_d = f64::INFINITY;
    for di in -1isize..=1 {
        for dj in -1isize..=1 {
            if let Some(k) = lat.at(i as isize + di, j as isize + dj) {
                let p = lat.point((i as isize + di) as usize, (j as isize + dj) as usize);
                // prefer the neighbour towards the inside
                let d = (p - c).norm() + 1e-9 * p.norm();
                if d < best_d {
                    best_d = d;
                    best = Some(k);
                }
            }
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn boundary_lengths_are_exact() {
        let g = Grid::disk(33, false).unwrap();
        assert!((g.boundary_length() - 2.0 * PI).abs() < 1e-9);
        let g = Grid::disk(33, true).unwrap();
        assert!((g.boundary_length() - 2.0 * PI).abs() < 1e-9);
        let g = Grid::half_disk(2.0, 41).unwrap();
        assert!(
            (g.boundary_length() - (PI * 2.0 + 4.0)).abs() < 1e-9,
            "{}",
            g.boundary_length()
        );
        let dt = PI / 8.0;
        let g = Grid::strip(-3.0, -3.0 + 40.0 * dt, 8, true).unwrap();
        // two sides plus the zero edge
        assert!(
            (g.boundary_length() - (80.0 * dt + PI)).abs() < 1e-9,
            "{}",
            g.boundary_length()
        );
    }

    #[test]
    fn areas_and_membership() {
        for g in [Grid::disk(33, false).unwrap(), Grid::disk(33, true).unwrap()] {
            assert!((g.total_area() - PI).abs() < 1e-9);
            assert!(g.nodes.iter().all(|z| g.domain.contains(*z, 1e-12)));
            assert!(g.area.iter().all(|a| *a > 0.0));
        }
        let g = Grid::half_disk(1.0, 33).unwrap();
        assert!((g.total_area() - 0.5 * PI).abs() < 1e-9);
        assert!(g.area.iter().all(|a| *a > 0.0));
        let g = Grid::strip(0.0, 2.0 * PI, 4, false).unwrap();
        assert!((g.total_area() - 2.0 * PI * PI).abs() < 1e-9);
    }

    #[test]
    fn interpolation_reproduces_linear_functions() {
        let g = Grid::half_disk(1.0, 33).unwrap();
        let f = |z: Point| 2.0 + 0.5 * z.re - z.im;
        let vals: Vec<f64> = g.nodes.iter().map(|z| f(*z)).collect();
        for w in [pt(0.1, 0.2), pt(-0.33, 0.41), pt(0.0, 0.0)] {
            assert!((g.interpolate(&vals, w).unwrap() - f(w)).abs() < 1e-12);
        }
        let g = Grid::strip(-1.0, 1.0, 8, false).unwrap();
        let vals: Vec<f64> = g.nodes.iter().map(|z| f(*z)).collect();
        assert!((g.interpolate(&vals, pt(0.3, 1.0)).unwrap() - f(pt(0.3, 1.0))).abs() < 1e-12);
        assert!(g.interpolate(&vals, pt(5.0, 1.0)).is_none());
    }

    #[test]
    fn free_circle_interpolation_is_a_partition_of_unity() {
        let g = Grid::disk(33, true).unwrap();
        for k in 0..50 {
            let w = Point::from_polar(0.99, 0.13 * k as f64);
            let s = g.interp_stencil(w);
            let total: f64 = s.iter().map(|x| x.1).sum();
            assert!((total - 1.0).abs() < 1e-12);
        }
    }
}
