//! Meshes of the unit cell, of the perforated domain and of the rectangle A.
//!
//! All meshes are conforming P1 triangulations. Coordinates of the perforated
//! mesh are produced by integer lattice arithmetic from the template cell, so
//! nodes shared between neighbouring cells are bitwise identical.

mod cell;
mod io;
mod locate;
mod tiling;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use cell::{build_cell_mesh, CellMesh};
pub use io::{read_mesh, write_mesh};
pub use locate::{locate_point, Location, PointLocator};
pub use tiling::{build_domain_mesh, build_perforated_mesh, build_tiled_mesh};

pub type Point = [f64; 2];

/// Lattice index `i` of the cell `eps * (i + Q)`.
pub type CellIndex = [u32; 2];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Region {
    Fluid,
    Hole,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EdgeTag {
    Outer,
    HoleBoundary(CellIndex),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Triangle {
    pub nodes: [usize; 3],
    pub region: Region,
    pub cell: Option<CellIndex>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundaryEdge {
    pub nodes: [usize; 2],
    pub tag: EdgeTag,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Mesh {
    pub nodes: Vec<Point>,
    pub triangles: Vec<Triangle>,
    pub boundary_edges: Vec<BoundaryEdge>,
    /// Cell size when the mesh tiles the unit square with `1/eps` cells per side.
    pub eps: Option<f64>,
}

/// Closed axis-aligned rectangle `[x0, x1] x [y0, y1]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl Rect {
    pub fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Self { x0, y0, x1, y1 }
    }

    pub fn unit() -> Self {
        Self::new(0.0, 0.0, 1.0, 1.0)
    }

    pub fn width(&self) -> f64 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> f64 {
        self.y1 - self.y0
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn contains(&self, p: Point) -> bool {
        p[0] >= self.x0 && p[0] <= self.x1 && p[1] >= self.y0 && p[1] <= self.y1
    }

    /// Membership in the open rectangle `A`.
    pub fn contains_open(&self, p: Point) -> bool {
        p[0] > self.x0 && p[0] < self.x1 && p[1] > self.y0 && p[1] < self.y1
    }

    /// Distance from an interior point to the boundary; zero outside.
    pub fn inner_distance(&self, p: Point) -> f64 {
        if !self.contains(p) {
            return 0.0;
        }
        (p[0] - self.x0)
            .min(self.x1 - p[0])
            .min(p[1] - self.y0)
            .min(self.y1 - p[1])
    }

    pub fn is_degenerate(&self) -> bool {
        !(self.x1 > self.x0 && self.y1 > self.y0) || !self.area().is_finite()
    }
}

/// Perforated-domain parameters. `Omega` is always the unit square.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DomainConfig {
    /// `n = 1/eps`.
    pub cells_per_side: u32,
    pub radius: f64,
    pub n_poly: usize,
    pub h_ref: f64,
    pub k_rect: Rect,
}

impl DomainConfig {
    pub fn new(eps: f64, radius: f64, n_poly: usize, h_ref: f64, k_rect: Rect) -> Result<Self> {
        let cfg = Self {
            cells_per_side: cells_per_side(eps)?,
            radius,
            n_poly,
            h_ref,
            k_rect,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn eps(&self) -> f64 {
        1.0 / self.cells_per_side as f64
    }

    pub fn validate(&self) -> Result<()> {
        if self.cells_per_side < 2 {
            return Err(Error::Config(format!(
                "1/eps must be an integer >= 2, got {}",
                self.cells_per_side
            )));
        }
        validate_hole(self.radius, self.n_poly, self.h_ref)?;
        let k = self.k_rect;
        if !(0.0 < k.x0 && k.x0 < k.x1 && k.x1 < 1.0 && 0.0 < k.y0 && k.y0 < k.y1 && k.y1 < 1.0) {
            return Err(Error::Config(format!(
                "K must be compactly contained in the unit square, got {k:?}"
            )));
        }
        Ok(())
    }
}

/// Converts `eps` into the integer number of cells per side, rejecting
/// values that are not reciprocals of integers >= 2.
pub fn cells_per_side(eps: f64) -> Result<u32> {
    if !(eps.is_finite() && eps > 0.0) {
        return Err(Error::Config(format!("eps must be positive, got {eps}")));
    }
    let n = (1.0 / eps).round();
    if n < 2.0 || (n * eps - 1.0).abs() > 1e-9 {
        return Err(Error::Config(format!(
            "eps must equal 1/n for an integer n >= 2, got {eps}"
        )));
    }
    Ok(n as u32)
}

pub(crate) fn validate_hole(radius: f64, n_poly: usize, h_ref: f64) -> Result<()> {
    if !(h_ref.is_finite() && h_ref > 0.0) {
        return Err(Error::Geometry(format!("h_ref must be positive, got {h_ref}")));
    }
    if !(radius.is_finite() && (0.0..0.5).contains(&radius)) {
        return Err(Error::Geometry(format!(
            "hole radius must lie in [0, 0.5), got {radius}"
        )));
    }
    if n_poly < 8 {
        return Err(Error::Geometry(format!(
            "hole polygon needs at least 8 vertices, got {n_poly}"
        )));
    }
    if radius + h_ref >= 0.5 {
        return Err(Error::Geometry(format!(
            "hole must stay interior to the cell: r + h_ref = {} >= 0.5",
            radius + h_ref
        )));
    }
    Ok(())
}

/// Twice the signed area of `(a, b, c)`.
#[inline]
pub fn orient(a: Point, b: Point, c: Point) -> f64 {
    (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
}

/// Edge-hashing audit result.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConformityReport {
    pub interior_edges: usize,
    pub boundary_edges: usize,
}

impl Mesh {
    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn vertices(&self, t: usize) -> [Point; 3] {
        let [a, b, c] = self.triangles[t].nodes;
        [self.nodes[a], self.nodes[b], self.nodes[c]]
    }

    pub fn signed_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.vertices(t);
        0.5 * orient(a, b, c)
    }

    pub fn centroid(&self, t: usize) -> Point {
        let [a, b, c] = self.vertices(t);
        [(a[0] + b[0] + c[0]) / 3.0, (a[1] + b[1] + c[1]) / 3.0]
    }

    pub fn region_area(&self, region: Region) -> f64 {
        (0..self.triangles.len())
            .filter(|&t| self.triangles[t].region == region)
            .map(|t| self.signed_area(t))
            .sum()
    }

    pub fn fluid_area(&self) -> f64 {
        self.region_area(Region::Fluid)
    }

    pub fn num_fluid_triangles(&self) -> usize {
        self.triangles.iter().filter(|t| t.region == Region::Fluid).count()
    }

    pub fn num_hole_triangles(&self) -> usize {
        self.triangles.iter().filter(|t| t.region == Region::Hole).count()
    }

    /// Nodes incident to at least one fluid triangle.
    pub fn active_nodes(&self) -> Vec<bool> {
        let mut active = vec![false; self.nodes.len()];
        for t in self.triangles.iter().filter(|t| t.region == Region::Fluid) {
            for &n in &t.nodes {
                active[n] = true;
            }
        }
        active
    }

    /// Nodes lying on boundary edges with the given tag predicate.
    pub fn nodes_on_edges(&self, mut pred: impl FnMut(&EdgeTag) -> bool) -> Vec<bool> {
        let mut on = vec![false; self.nodes.len()];
        for e in self.boundary_edges.iter().filter(|e| pred(&e.tag)) {
            on[e.nodes[0]] = true;
            on[e.nodes[1]] = true;
        }
        on
    }

    pub fn hole_count(&self) -> usize {
        let mut cells: Vec<CellIndex> = self
            .boundary_edges
            .iter()
            .filter_map(|e| match e.tag {
                EdgeTag::HoleBoundary(c) => Some(c),
                EdgeTag::Outer => None,
            })
            .collect();
        cells.sort_unstable();
        cells.dedup();
        cells.len()
    }

    pub fn min_signed_area(&self) -> f64 {
        (0..self.triangles.len())
            .map(|t| self.signed_area(t))
            .fold(f64::INFINITY, f64::min)
    }

    /// Checks that every edge is shared by at most two triangles and that
    /// every edge with a single incident triangle is a listed boundary edge.
    pub fn check_conformity(&self) -> Result<ConformityReport> {
        let mut count: HashMap<(usize, usize), usize> = HashMap::new();
        for t in &self.triangles {
            let [a, b, c] = t.nodes;
            for (p, q) in [(a, b), (b, c), (c, a)] {
                *count.entry((p.min(q), p.max(q))).or_default() += 1;
            }
        }
        let listed: std::collections::HashSet<(usize, usize)> = self
            .boundary_edges
            .iter()
            .map(|e| (e.nodes[0].min(e.nodes[1]), e.nodes[0].max(e.nodes[1])))
            .collect();
        let mut report = ConformityReport {
            interior_edges: 0,
            boundary_edges: 0,
        };
        for (&(p, q), &c) in &count {
            match c {
                2 => report.interior_edges += 1,
                1 if listed.contains(&(p, q)) => report.boundary_edges += 1,
                _ => {
                    let x = self.nodes[p];
                    return Err(Error::Meshing {
                        message: format!("edge ({p}, {q}) has {c} incident triangles"),
                        x: x[0],
                        y: x[1],
                    });
                }
            }
        }
        for &(p, q) in &listed {
            if !count.contains_key(&(p, q)) {
                return Err(Error::Geometry(format!("boundary edge ({p}, {q}) bounds no triangle")));
            }
        }
        Ok(report)
    }
}
