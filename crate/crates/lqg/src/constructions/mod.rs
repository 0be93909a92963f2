//! Disk samplers. Each one returns the bulk and boundary measures pushed to the
//! unit disk with the marked points at `(z1, z2, z3)`, an importance weight and
//! named diagnostics.
//!
//! Strip charts are used throughout: the strip `R x [0, pi]` is sent to the
//! upper half-plane by `w -> exp(i pi - w)` and on to the disk, so that
//! `(+inf, i pi, -inf)` land on `(0, 1, inf)` and then on `(-1, -i, 1)`.

mod direct;
mod limiting;
mod location;

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;

use num_complex::Complex64;

pub use direct::{sample_dms_direct, sample_hrv_direct, sample_hrv_unit_area, strip_insertion_profile, TiltedRadial};
pub use limiting::{band_interval, sample_shared_limiting, truncated_normal, LimitingConfig};
pub use location::{location_diagnostics, location_table, LocationInput, LocationRow, LocationTable};

use crate::error::{LqgError, Result};
use crate::geometry::{ConformalMap, Domain, ExtPoint, GammaParams, Mobius, Point, I};
use crate::gmc::{Cell, GmcPair};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ConstructionTag {
    Hrv,
    Dms,
    SharedWeighted,
    SharedUnweighted,
    HrvUnitArea,
}

impl ConstructionTag {
    pub const ALL: [ConstructionTag; 5] = [
        ConstructionTag::Hrv,
        ConstructionTag::Dms,
        ConstructionTag::SharedWeighted,
        ConstructionTag::SharedUnweighted,
        ConstructionTag::HrvUnitArea,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ConstructionTag::Hrv => "hrv",
            ConstructionTag::Dms => "dms",
            ConstructionTag::SharedWeighted => "shared_weighted",
            ConstructionTag::SharedUnweighted => "shared_unweighted",
            ConstructionTag::HrvUnitArea => "hrv_unit_area",
        }
    }

    /// Accepts `-` or `_` as separator.
    pub fn parse(s: &str) -> Option<ConstructionTag> {
        let s = s.replace('-', "_");
        ConstructionTag::ALL.into_iter().find(|t| t.as_str() == s)
    }
}

impl fmt::Display for ConstructionTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug)]
pub struct DiskSample {
    pub measures: GmcPair,
    pub marked_points: [Point; 3],
    pub tag: ConstructionTag,
    pub weight: f64,
    /// `ln weight`; weights of heavy samples can leave the range of `f64`.
    pub log_weight: f64,
    pub diagnostics: BTreeMap<String, f64>,
}

impl DiskSample {
    pub fn diag(&self, key: &str) -> Option<f64> {
        self.diagnostics.get(key).copied()
    }
}

pub const DEFAULT_POINTS: [Point; 3] = [
    Complex64::new(-1.0, 0.0),
    Complex64::new(0.0, -1.0),
    Complex64::new(1.0, 0.0),
];

/// Strip lattice resolution: a grid size `n` (as in `n x n`) gives `(n - 1)/2`
/// angular rows. The window defaults to [`default_window`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StripResolution {
    pub n: usize,
    pub window: Option<f64>,
}

impl StripResolution {
    pub fn new(n: usize) -> StripResolution {
        StripResolution { n, window: None }
    }

    pub fn rows(&self) -> Result<usize> {
        if self.n < 5 {
            return Err(LqgError::GridTooCoarse(format!(
                "grid size {} (need at least 5)",
                self.n
            )));
        }
        Ok((self.n - 1) / 2)
    }

    pub fn spacing(&self) -> Result<f64> {
        Ok(PI / self.rows()? as f64)
    }

    pub fn window(&self, params: &GammaParams) -> f64 {
        self.window.unwrap_or_else(|| default_window(params))
    }
}

/// Half-width past the maximum after which boundary mass is below `e^{-7}` of
/// its peak in expectation: `max(10, 7 / ((gamma/2)(Q - gamma)))`.
pub fn default_window(params: &GammaParams) -> f64 {
    (7.0 / (0.5 * params.gamma * params.drift())).max(10.0)
}

/// `3 gamma/2 - Q`, snapped to 0 at rounding level so that `gamma = sqrt 2`
/// gives unit weights exactly.
pub fn three_point_s(params: &GammaParams) -> f64 {
    let s = 1.5 * params.gamma - params.q;
    if s.abs() < 1e-12 {
        0.0
    } else {
        s
    }
}

/// Disk automorphism taking `(-1, -i, 1)` to `points`, which must be distinct,
/// on the unit circle and in counterclockwise order.
pub fn disk_frame(points: &[Point; 3]) -> Result<ConformalMap> {
    for (a, p) in points.iter().enumerate() {
        if (p.norm() - 1.0).abs() > 1e-9 {
            return Err(LqgError::Geometry(format!(
                "marked point {p} is not on the unit circle"
            )));
        }
        if points[a + 1..].iter().any(|q| (q - p).norm() < 1e-9) {
            return Err(LqgError::CoincidentInsertions);
        }
    }
    let ang = |z: Point| z.arg().rem_euclid(2.0 * PI);
    let (a1, a2, a3) = (ang(points[0]), ang(points[1]), ang(points[2]));
    if (a2 - a1).rem_euclid(2.0 * PI) > (a3 - a1).rem_euclid(2.0 * PI) {
        return Err(LqgError::Geometry("marked points must run counterclockwise".into()));
    }
    let m = Mobius::from_triples(DEFAULT_POINTS.map(ExtPoint::Finite), points.map(ExtPoint::Finite))?;
    Ok(ConformalMap::mobius(m, Domain::UnitDisk, Domain::UnitDisk))
}

/// Strip automorphism moving the boundary point `w` to `i pi` while keeping the
/// boundary orientation: a translation for points on the top line, the half
/// turn followed by a translation for points on the bottom line.
pub fn root_to_top(w: Point) -> ConformalMap {
    if (w.im - PI).abs() < 1e-9 {
        ConformalMap::strip_translation(-w.re)
    } else {
        ConformalMap::strip_half_turn().then(ConformalMap::strip_translation(w.re))
    }
}

/// `root` (a strip automorphism) followed by strip -> H -> D -> `frame`.
pub fn strip_to_disk(root: ConformalMap, frame: ConformalMap) -> ConformalMap {
    root.then(ConformalMap::strip_to_halfplane())
        .then(ConformalMap::halfplane_to_disk())
        .then(frame)
}

/// Half-plane image of a strip boundary point: `exp(i pi - w)`, real.
pub fn halfplane_root(w: Point) -> f64 {
    (I * PI - w).exp().re
}

/// Boundary cells in counterclockwise order seen from the half-plane: the top
/// line from `+inf` to `-inf`, then the bottom line back.
pub(crate) fn boundary_in_order(cells: &[Cell]) -> Vec<Cell> {
    let mut top: Vec<Cell> = cells.iter().filter(|c| c.pos.im > 0.5 * PI).copied().collect();
    let mut bottom: Vec<Cell> = cells.iter().filter(|c| c.pos.im <= 0.5 * PI).copied().collect();
    top.sort_by(|a, b| b.pos.re.total_cmp(&a.pos.re));
    bottom.sort_by(|a, b| a.pos.re.total_cmp(&b.pos.re));
    top.extend(bottom);
    top
}

/// Cell carrying the point at mass coordinate `u` along `ordered`.
pub(crate) fn pick_by_mass(ordered: &[Cell], u: f64) -> Cell {
    let mut acc = 0.0;
    for c in ordered {
        acc += c.mass;
        if acc >= u {
            return *c;
        }
    }
    *ordered.last().expect("nonempty boundary")
}
