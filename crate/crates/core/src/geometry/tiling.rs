use std::collections::HashMap;

use super::{BoundaryEdge, CellMesh, DomainConfig, EdgeTag, Mesh, Rect, Region, Triangle};
use crate::error::{Error, Result};

/// Tiles `n x n` scaled copies of the template over the unit square.
///
/// Face nodes are shared through their global lattice label
/// `(ix*m + a, iy*m + b)`; nodes of the hole interior are kept even when the
/// hole triangles are dropped so that the perforated mesh and the full mesh
/// share one node numbering.
pub fn build_tiled_mesh(cells_per_side: u32, cell: &CellMesh, keep_holes: bool) -> Result<Mesh> {
    if cells_per_side < 1 {
        return Err(Error::Config("need at least one cell per side".into()));
    }
    let n = cells_per_side;
    let m = cell.face_segments as u64;
    let top = n as u64 * m;
    let nf = n as f64;
    let tmpl = &cell.mesh;

    let mut nodes = Vec::new();
    let mut lattice: HashMap<(u64, u64), usize> = HashMap::new();
    let mut global_label: Vec<Option<(u64, u64)>> = Vec::new();
    let mut triangles = Vec::new();
    let mut boundary_edges = Vec::new();

    for iy in 0..n {
        for ix in 0..n {
            let ids: Vec<usize> = tmpl
                .nodes
                .iter()
                .zip(&cell.face_label)
                .map(|(&p, label)| {
                    let coord = [(ix as f64 + p[0]) / nf, (iy as f64 + p[1]) / nf];
                    match label {
                        Some([a, b]) => {
                            let key = (ix as u64 * m + *a as u64, iy as u64 * m + *b as u64);
                            *lattice.entry(key).or_insert_with(|| {
                                nodes.push(coord);
                                global_label.push(Some(key));
                                nodes.len() - 1
                            })
                        }
                        None => {
                            nodes.push(coord);
                            global_label.push(None);
                            nodes.len() - 1
                        }
                    }
                })
                .collect();
            for t in &tmpl.triangles {
                if t.region == Region::Hole && !keep_holes {
                    continue;
                }
                triangles.push(Triangle {
                    nodes: t.nodes.map(|i| ids[i]),
                    region: t.region,
                    cell: Some([ix, iy]),
                });
            }
            for e in &tmpl.boundary_edges {
                let [p, q] = e.nodes.map(|i| ids[i]);
                match e.tag {
                    EdgeTag::HoleBoundary(_) => boundary_edges.push(BoundaryEdge {
                        nodes: [p, q],
                        tag: EdgeTag::HoleBoundary([ix, iy]),
                    }),
                    EdgeTag::Outer => {
                        let (Some(lp), Some(lq)) = (global_label[p], global_label[q]) else {
                            return Err(Error::Geometry("template outer edge without lattice label".into()));
                        };
                        let on_outer = (lp.0 == lq.0 && (lp.0 == 0 || lp.0 == top))
                            || (lp.1 == lq.1 && (lp.1 == 0 || lp.1 == top));
                        if on_outer {
                            boundary_edges.push(BoundaryEdge {
                                nodes: [p, q],
                                tag: EdgeTag::Outer,
                            });
                        }
                    }
                }
            }
        }
    }
    Ok(Mesh {
        nodes,
        triangles,
        boundary_edges,
        eps: Some(1.0 / nf),
    })
}

/// Perforated domain `Omega_eps`: every cell of the exact tiling carries a hole.
pub fn build_perforated_mesh(cfg: &DomainConfig, cell: &CellMesh) -> Result<Mesh> {
    cfg.validate()?;
    build_tiled_mesh(cfg.cells_per_side, cell, false)
}

/// Structured triangulation of a rectangle, two triangles per grid square
/// with the diagonal from lower-left to upper-right.
pub fn build_domain_mesh(rect: Rect, h: f64) -> Result<Mesh> {
    if rect.is_degenerate() {
        return Err(Error::Geometry(format!("degenerate rectangle {rect:?}")));
    }
    if !(h.is_finite() && h > 0.0) {
        return Err(Error::Geometry(format!("mesh size must be positive, got {h}")));
    }
    let nx = ((rect.width() / h) - 1e-9).ceil().max(1.0) as usize;
    let ny = ((rect.height() / h) - 1e-9).ceil().max(1.0) as usize;
    let coord = |k: usize, n: usize, lo: f64, hi: f64| {
        if k == n {
            hi
        } else {
            lo + (hi - lo) * (k as f64 / n as f64)
        }
    };
    let id = |i: usize, j: usize| j * (nx + 1) + i;
    let mut nodes = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        for i in 0..=nx {
            nodes.push([coord(i, nx, rect.x0, rect.x1), coord(j, ny, rect.y0, rect.y1)]);
        }
    }
    let mut triangles = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let (p00, p10, p01, p11) = (id(i, j), id(i + 1, j), id(i, j + 1), id(i + 1, j + 1));
            for nodes in [[p00, p10, p11], [p00, p11, p01]] {
                triangles.push(Triangle {
                    nodes,
                    region: Region::Fluid,
                    cell: None,
                });
            }
        }
    }
    let mut boundary_edges = Vec::new();
    let outer = |nodes| BoundaryEdge {
        nodes,
        tag: EdgeTag::Outer,
    };
    for i in 0..nx {
        boundary_edges.push(outer([id(i, 0), id(i + 1, 0)]));
        boundary_edges.push(outer([id(i, ny), id(i + 1, ny)]));
    }
    for j in 0..ny {
        boundary_edges.push(outer([id(0, j), id(0, j + 1)]));
        boundary_edges.push(outer([id(nx, j), id(nx, j + 1)]));
    }
    Ok(Mesh {
        nodes,
        triangles,
        boundary_edges,
        eps: None,
    })
}
