//! Template mesh of the unit cell `Q = (0,1)^2` with a regular polygonal hole.
//!
//! The annulus between the hole polygon and the square is meshed with
//! layered rings joined by a zipper triangulation. When the polygon vertex
//! count is a multiple of four the construction runs on one octant and is
//! mirrored, so the template has the full symmetry group of the square and
//! the effective tensor comes out exactly isotropic.

use std::collections::HashMap;
use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_4, PI};

use super::{orient, validate_hole, BoundaryEdge, EdgeTag, Mesh, Point, Region, Triangle};
use crate::error::{Error, Result};

/// Template cell mesh plus the lattice labels needed for periodic
/// identification and tiling.
#[derive(Clone, Debug)]
pub struct CellMesh {
    pub mesh: Mesh,
    /// Lattice coordinates `(a, b)` in `0..=m` of nodes on the cell boundary;
    /// the node sits at `(a/m, b/m)`.
    pub face_label: Vec<Option<[u32; 2]>>,
    /// Number of uniform boundary segments per side, `m`.
    pub face_segments: u32,
    pub radius: f64,
    pub n_poly: usize,
    /// Exact area of the hole polygon.
    pub hole_area: f64,
    /// Exact perimeter of the hole polygon, `|Sigma^0|`.
    pub hole_perimeter: f64,
}

impl CellMesh {
    /// `|Y|` measured as the total fluid area of the template.
    pub fn cell_area(&self) -> f64 {
        self.mesh.fluid_area()
    }

    /// `(slave, master)` pairs identifying opposite faces; all corners map to
    /// the corner at the origin.
    pub fn periodic_pairs(&self) -> Result<Vec<(usize, usize)>> {
        let m = self.face_segments;
        let by_label: HashMap<[u32; 2], usize> = self
            .face_label
            .iter()
            .enumerate()
            .filter_map(|(i, l)| l.map(|l| (l, i)))
            .collect();
        let mut pairs = Vec::new();
        for (node, label) in self.face_label.iter().enumerate() {
            let Some([a, b]) = *label else { continue };
            let master_label = [a % m, b % m];
            if master_label == [a, b] {
                continue;
            }
            let master = *by_label.get(&master_label).ok_or_else(|| {
                Error::Geometry(format!(
                    "periodic partner of face node {node} (label {a},{b}) is missing"
                ))
            })?;
            pairs.push((node, master));
        }
        Ok(pairs)
    }
}

/// Regular `n_poly`-gon of circumradius `radius` centred in the cell, with a
/// vertex on the positive x axis.
#[derive(Clone, Copy, Debug)]
struct Polygon {
    radius: f64,
    n: usize,
}

impl Polygon {
    fn vertex(&self, k: usize) -> Point {
        let theta = 2.0 * PI * k as f64 / self.n as f64;
        [self.radius * theta.cos(), self.radius * theta.sin()]
    }

    /// Radial distance to the polygon along direction `theta`.
    fn rho(&self, theta: f64) -> f64 {
        let step = 2.0 * PI / self.n as f64;
        let k = (theta / step).floor();
        let mid = (k + 0.5) * step;
        self.radius * (PI / self.n as f64).cos() / (theta - mid).cos()
    }

    fn area(&self) -> f64 {
        0.5 * self.n as f64 * self.radius * self.radius * (2.0 * PI / self.n as f64).sin()
    }

    fn perimeter(&self) -> f64 {
        2.0 * self.n as f64 * self.radius * (PI / self.n as f64).sin()
    }
}

/// Radial distance from the cell centre to the square boundary.
fn rho_square(theta: f64) -> f64 {
    0.5 / theta.cos().abs().max(theta.sin().abs())
}

/// Builds the template mesh of the unit cell.
pub fn build_cell_mesh(radius: f64, n_poly: usize, h_ref: f64) -> Result<CellMesh> {
    validate_hole(radius, n_poly, h_ref)?;
    // even segment count puts a face node on each symmetry line
    let m = 2 * ((1.0 / (2.0 * h_ref)) - 1e-9).ceil().max(1.0) as u32;
    let poly = Polygon { radius, n: n_poly };

    let raw = if radius == 0.0 {
        structured_cell(m)
    } else if n_poly.is_multiple_of(4) {
        mirror_octant(&annulus(poly, m, Sector::Octant)?)
    } else {
        annulus(poly, m, Sector::Full)?
    };

    let mesh = Mesh {
        nodes: raw.nodes.iter().map(|p| [0.5 + p[0], 0.5 + p[1]]).collect(),
        triangles: raw
            .triangles
            .iter()
            .map(|&(nodes, region)| Triangle {
                nodes,
                region,
                cell: Some([0, 0]),
            })
            .collect(),
        boundary_edges: raw
            .outer_edges
            .iter()
            .map(|&nodes| BoundaryEdge {
                nodes,
                tag: EdgeTag::Outer,
            })
            .chain(raw.hole_edges.iter().map(|&nodes| BoundaryEdge {
                nodes,
                tag: EdgeTag::HoleBoundary([0, 0]),
            }))
            .collect(),
        eps: None,
    };
    for t in 0..mesh.triangles.len() {
        if mesh.signed_area(t) <= 1e-14 {
            let c = mesh.centroid(t);
            return Err(Error::Meshing {
                message: format!("degenerate template triangle {t}"),
                x: c[0],
                y: c[1],
            });
        }
    }
    let half = (m / 2) as i64;
    let face_label = raw
        .labels
        .iter()
        .map(|l| l.map(|[a, b]| [(a + half) as u32, (b + half) as u32]))
        .collect();
    let (hole_area, hole_perimeter) = if radius == 0.0 {
        (0.0, 0.0)
    } else {
        (poly.area(), poly.perimeter())
    };
    Ok(CellMesh {
        mesh,
        face_label,
        face_segments: m,
        radius,
        n_poly,
        hole_area,
        hole_perimeter,
    })
}

/// Mesh in coordinates centred at the cell centre. Face labels are integer
/// lattice coordinates relative to the centre.
#[derive(Default)]
struct RawMesh {
    nodes: Vec<Point>,
    labels: Vec<Option<[i64; 2]>>,
    triangles: Vec<([usize; 3], Region)>,
    outer_edges: Vec<[usize; 2]>,
    hole_edges: Vec<[usize; 2]>,
}

impl RawMesh {
    fn push(&mut self, p: Point, label: Option<[i64; 2]>) -> usize {
        self.nodes.push(p);
        self.labels.push(label);
        self.nodes.len() - 1
    }
}

fn face_coord(k: i64, m: u32) -> f64 {
    k as f64 / m as f64
}

fn structured_cell(m: u32) -> RawMesh {
    let half = (m / 2) as i64;
    let mut raw = RawMesh::default();
    let mut id = vec![vec![0usize; m as usize + 1]; m as usize + 1];
    for (j, row) in id.iter_mut().enumerate() {
        for (i, slot) in row.iter_mut().enumerate() {
            let (a, b) = (i as i64 - half, j as i64 - half);
            let on_face = i == 0 || j == 0 || i == m as usize || j == m as usize;
            *slot = raw.push([face_coord(a, m), face_coord(b, m)], on_face.then_some([a, b]));
        }
    }
    let m = m as usize;
    for j in 0..m {
        for i in 0..m {
            let (p00, p10, p01, p11) = (id[j][i], id[j][i + 1], id[j + 1][i], id[j + 1][i + 1]);
            raw.triangles.push(([p00, p10, p11], Region::Fluid));
            raw.triangles.push(([p00, p11, p01], Region::Fluid));
        }
    }
    for k in 0..m {
        raw.outer_edges.push([id[0][k], id[0][k + 1]]);
        raw.outer_edges.push([id[m][k], id[m][k + 1]]);
        raw.outer_edges.push([id[k][0], id[k + 1][0]]);
        raw.outer_edges.push([id[k][m], id[k + 1][m]]);
    }
    raw
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Sector {
    /// `0 <= theta <= pi/4`, end nodes pinned to the two mirror rays.
    Octant,
    /// Closed ring, last node identified with the first.
    Full,
}

impl Sector {
    fn end_angle(self) -> f64 {
        match self {
            Sector::Octant => FRAC_PI_4,
            Sector::Full => 2.0 * PI,
        }
    }
}

/// Piecewise-linear interpolation of a monotone angle list over a uniform
/// parameter `u` in `[0, 1]`.
fn interp_angle(angles: &[f64], u: f64) -> f64 {
    let s = u * (angles.len() - 1) as f64;
    let i = (s.floor() as usize).min(angles.len() - 2);
    let f = s - i as f64;
    angles[i] * (1.0 - f) + angles[i + 1] * f
}

/// Point at angle `theta` and radius `rho`, pinned exactly onto the mirror
/// rays of the octant.
fn polar(theta: f64, rho: f64, on_start: bool, on_diag: bool) -> Point {
    if on_start {
        [rho, 0.0]
    } else if on_diag {
        let v = rho * FRAC_1_SQRT_2;
        [v, v]
    } else {
        [rho * theta.cos(), rho * theta.sin()]
    }
}

/// Hole polygon points (vertices plus subdivisions) ordered by angle.
fn polygon_ring(poly: Polygon, h: f64, sector: Sector) -> Vec<Point> {
    let mut corners: Vec<Point> = Vec::new();
    match sector {
        Sector::Octant => {
            let kmax = poly.n / 8;
            for k in 0..=kmax {
                corners.push(if k == 0 {
                    [poly.radius, 0.0]
                } else if 8 * k == poly.n {
                    let v = poly.radius * FRAC_1_SQRT_2;
                    [v, v]
                } else {
                    poly.vertex(k)
                });
            }
            if !poly.n.is_multiple_of(8) {
                corners.push(polar(FRAC_PI_4, poly.rho(FRAC_PI_4), false, true));
            }
        }
        Sector::Full => {
            for k in 0..poly.n {
                corners.push(poly.vertex(k));
            }
            corners.push(corners[0]);
        }
    }
    let mut ring = vec![corners[0]];
    for w in corners.windows(2) {
        let (a, b) = (w[0], w[1]);
        let len = ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt();
        let pieces = (len / h - 1e-9).ceil().max(1.0) as usize;
        for s in 1..=pieces {
            if s == pieces {
                ring.push(b);
            } else {
                let f = s as f64 / pieces as f64;
                ring.push([a[0] + f * (b[0] - a[0]), a[1] + f * (b[1] - a[1])]);
            }
        }
    }
    ring
}

/// Square boundary nodes ordered by angle, with their lattice labels.
fn square_ring(m: u32, sector: Sector) -> Vec<(Point, [i64; 2])> {
    let half = (m / 2) as i64;
    match sector {
        Sector::Octant => (0..=half).map(|j| ([0.5, face_coord(j, m)], [half, j])).collect(),
        Sector::Full => {
            let mut labels = Vec::new();
            for j in 0..half {
                labels.push([half, j]);
            }
            for i in (-half + 1..=half).rev() {
                labels.push([i, half]);
            }
            for j in (-half + 1..=half).rev() {
                labels.push([-half, j]);
            }
            for i in -half..half {
                labels.push([i, -half]);
            }
            for j in -half..=0 {
                labels.push([half, j]);
            }
            labels
                .into_iter()
                .map(|l| ([face_coord(l[0], m), face_coord(l[1], m)], l))
                .collect()
        }
    }
}

fn angle_of(p: Point, sector: Sector, idx: usize, len: usize) -> f64 {
    if idx == 0 {
        0.0
    } else if idx == len - 1 {
        sector.end_angle()
    } else {
        let a = p[1].atan2(p[0]);
        if a < 0.0 {
            a + 2.0 * PI
        } else {
            a
        }
    }
}

/// Layered mesh of the sector between the hole polygon and the square, plus
/// the hole interior.
fn annulus(poly: Polygon, m: u32, sector: Sector) -> Result<RawMesh> {
    let h = 1.0 / m as f64;
    let closed = sector == Sector::Full;
    let mut raw = RawMesh::default();

    let poly_pts = polygon_ring(poly, h, sector);
    let sq = square_ring(m, sector);
    let poly_angles: Vec<f64> = poly_pts
        .iter()
        .enumerate()
        .map(|(i, &p)| angle_of(p, sector, i, poly_pts.len()))
        .collect();
    let sq_angles: Vec<f64> = sq
        .iter()
        .enumerate()
        .map(|(i, &(p, _))| angle_of(p, sector, i, sq.len()))
        .collect();

    let ring_ids = |raw: &mut RawMesh, pts: Vec<(Point, Option<[i64; 2]>)>| -> Vec<usize> {
        let n = pts.len();
        let mut ids: Vec<usize> = Vec::with_capacity(n);
        for (i, (p, l)) in pts.into_iter().enumerate() {
            if closed && i == n - 1 {
                ids.push(ids[0]);
            } else {
                ids.push(raw.push(p, l));
            }
        }
        ids
    };

    let inner = ring_ids(&mut raw, poly_pts.iter().map(|&p| (p, None)).collect());
    for w in inner.windows(2) {
        raw.hole_edges.push([w[0], w[1]]);
    }

    // fluid layers
    let r_in = poly.radius * (PI / poly.n as f64).cos();
    let gap = 0.5 * ((0.5 - r_in) + (0.5 * 2f64.sqrt() - poly.radius));
    let layers = ((gap / h).round() as usize).max(1);
    let n0 = (poly_pts.len() - 1) as f64;
    let nl = (sq.len() - 1) as f64;
    let min_segments = if closed { 3 } else { 1 };

    let mut prev = inner.clone();
    for layer in 1..=layers {
        let ring = if layer == layers {
            let ids = ring_ids(&mut raw, sq.iter().map(|&(p, l)| (p, Some(l))).collect());
            for w in ids.windows(2) {
                raw.outer_edges.push([w[0], w[1]]);
            }
            ids
        } else {
            let t = layer as f64 / layers as f64;
            let segs = (((1.0 - t) * n0 + t * nl).round() as usize).max(min_segments);
            let pts = (0..=segs)
                .map(|q| {
                    let u = q as f64 / segs as f64;
                    let theta = (1.0 - t) * interp_angle(&poly_angles, u) + t * interp_angle(&sq_angles, u);
                    let rho = (1.0 - t) * poly.rho(theta) + t * rho_square(theta);
                    let p = polar(theta, rho, q == 0, !closed && q == segs);
                    (p, None)
                })
                .collect();
            ring_ids(&mut raw, pts)
        };
        zipper(&mut raw, &prev, &ring, Region::Fluid)?;
        prev = ring;
    }

    // hole interior: shrinking rings, then a fan to the centre
    let hole_rings = ((r_in / h).round() as usize).saturating_sub(1);
    let mut outer = inner;
    for j in 1..=hole_rings {
        let s = j as f64 / (hole_rings + 1) as f64;
        let segs = ((n0 * (1.0 - s)).round() as usize).max(min_segments);
        let pts = (0..=segs)
            .map(|q| {
                let theta = interp_angle(&poly_angles, q as f64 / segs as f64);
                let rho = (1.0 - s) * poly.rho(theta);
                (polar(theta, rho, q == 0, !closed && q == segs), None)
            })
            .collect();
        let ring = ring_ids(&mut raw, pts);
        zipper(&mut raw, &ring, &outer, Region::Hole)?;
        outer = ring;
    }
    let centre = raw.push([0.0, 0.0], None);
    for w in outer.windows(2) {
        push_checked(&mut raw, [centre, w[0], w[1]], Region::Hole)?;
    }
    Ok(raw)
}

fn push_checked(raw: &mut RawMesh, tri: [usize; 3], region: Region) -> Result<()> {
    let [a, b, c] = tri.map(|i| raw.nodes[i]);
    if orient(a, b, c) <= 0.0 {
        return Err(Error::Meshing {
            message: "non-positive triangle in template".into(),
            x: a[0] + 0.5,
            y: a[1] + 0.5,
        });
    }
    raw.triangles.push((tri, region));
    Ok(())
}

fn dist2(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)
}

/// Triangulates the strip between two rings ordered by angle, picking the
/// shorter new diagonal whenever both advances are valid.
fn zipper(raw: &mut RawMesh, inner: &[usize], outer: &[usize], region: Region) -> Result<()> {
    let (mut i, mut j) = (0, 0);
    while i + 1 < inner.len() || j + 1 < outer.len() {
        let p = |k: usize| raw.nodes[k];
        let adv_inner = i + 1 < inner.len() && orient(p(inner[i]), p(outer[j]), p(inner[i + 1])) > 0.0;
        let adv_outer = j + 1 < outer.len() && orient(p(inner[i]), p(outer[j]), p(outer[j + 1])) > 0.0;
        let take_inner = match (adv_inner, adv_outer) {
            (true, true) => dist2(p(inner[i + 1]), p(outer[j])) <= dist2(p(inner[i]), p(outer[j + 1])),
            (true, false) => true,
            (false, true) => false,
            (false, false) => {
                let q = p(inner[i]);
                return Err(Error::Meshing {
                    message: "zipper triangulation stalled".into(),
                    x: q[0] + 0.5,
                    y: q[1] + 0.5,
                });
            }
        };
        if take_inner {
            push_checked(raw, [inner[i], outer[j], inner[i + 1]], region)?;
            i += 1;
        } else {
            push_checked(raw, [inner[i], outer[j], outer[j + 1]], region)?;
            j += 1;
        }
    }
    Ok(())
}

/// Reflects an octant mesh through the eight symmetries of the square and
/// merges nodes on the mirror lines.
fn mirror_octant(oct: &RawMesh) -> RawMesh {
    let mut full = RawMesh::default();
    let mut index: HashMap<(u64, u64), usize> = HashMap::new();
    let clean = |v: f64| if v == 0.0 { 0.0 } else { v };
    let mut edge_seen = std::collections::HashSet::new();
    for swap in [false, true] {
        for negx in [false, true] {
            for negy in [false, true] {
                let map = |p: [f64; 2]| {
                    let (mut x, mut y) = if swap { (p[1], p[0]) } else { (p[0], p[1]) };
                    if negx {
                        x = -x;
                    }
                    if negy {
                        y = -y;
                    }
                    [clean(x), clean(y)]
                };
                let map_label = |l: [i64; 2]| {
                    let (mut a, mut b) = if swap { (l[1], l[0]) } else { (l[0], l[1]) };
                    if negx {
                        a = -a;
                    }
                    if negy {
                        b = -b;
                    }
                    [a, b]
                };
                let flips = swap as u8 + negx as u8 + negy as u8;
                let ids: Vec<usize> = oct
                    .nodes
                    .iter()
                    .zip(&oct.labels)
                    .map(|(&p, &l)| {
                        let q = map(p);
                        *index
                            .entry((q[0].to_bits(), q[1].to_bits()))
                            .or_insert_with(|| full.push(q, l.map(map_label)))
                    })
                    .collect();
                for &([a, b, c], region) in &oct.triangles {
                    let tri = if flips.is_multiple_of(2) {
                        [ids[a], ids[b], ids[c]]
                    } else {
                        [ids[a], ids[c], ids[b]]
                    };
                    full.triangles.push((tri, region));
                }
                for (src, dst) in [(&oct.outer_edges, 0), (&oct.hole_edges, 1)] {
                    for &[a, b] in src {
                        let (p, q) = (ids[a], ids[b]);
                        if edge_seen.insert((p.min(q), p.max(q))) {
                            if dst == 0 {
                                full.outer_edges.push([p, q]);
                            } else {
                                full.hole_edges.push([p, q]);
                            }
                        }
                    }
                }
            }
        }
    }
    full
}
