//! Line-oriented mesh text format.
//!
//! ```text
//! <N> nodes <T> triangles <E> edges
//! x y                              (N lines)
//! i j k FLUID|HOLE cell_ix cell_iy (T lines, cell -1 -1 when none)
//! i j OUTER|HOLE_BDRY(ix,iy)       (E lines)
//! ```

use std::io::Write;

use super::{BoundaryEdge, EdgeTag, Mesh, Region, Triangle};
use crate::error::{Error, Result};

pub fn write_mesh(mesh: &Mesh, mut out: impl Write) -> Result<()> {
    writeln!(
        out,
        "{} nodes {} triangles {} edges",
        mesh.nodes.len(),
        mesh.triangles.len(),
        mesh.boundary_edges.len()
    )?;
    for p in &mesh.nodes {
        writeln!(out, "{:?} {:?}", p[0], p[1])?;
    }
    for t in &mesh.triangles {
        let region = match t.region {
            Region::Fluid => "FLUID",
            Region::Hole => "HOLE",
        };
        let (cx, cy) = t.cell.map_or((-1, -1), |c| (c[0] as i64, c[1] as i64));
        writeln!(out, "{} {} {} {region} {cx} {cy}", t.nodes[0], t.nodes[1], t.nodes[2])?;
    }
    for e in &mesh.boundary_edges {
        match e.tag {
            EdgeTag::Outer => writeln!(out, "{} {} OUTER", e.nodes[0], e.nodes[1])?,
            EdgeTag::HoleBoundary([ix, iy]) => writeln!(out, "{} {} HOLE_BDRY({ix},{iy})", e.nodes[0], e.nodes[1])?,
        }
    }
    Ok(())
}

fn bad(line: usize, what: &str) -> Error {
    Error::Geometry(format!("mesh text line {line}: {what}"))
}

fn num<T: std::str::FromStr>(tok: Option<&str>, line: usize) -> Result<T> {
    tok.and_then(|s| s.parse().ok())
        .ok_or_else(|| bad(line, "expected a number"))
}

pub fn read_mesh(text: &str) -> Result<Mesh> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (ln, header) = lines.next().ok_or_else(|| bad(1, "missing header"))?;
    let h: Vec<&str> = header.split_whitespace().collect();
    if h.len() != 6 || h[1] != "nodes" || h[3] != "triangles" || h[5] != "edges" {
        return Err(bad(ln + 1, "malformed header"));
    }
    let (nn, nt, ne): (usize, usize, usize) = (
        num(Some(h[0]), ln + 1)?,
        num(Some(h[2]), ln + 1)?,
        num(Some(h[4]), ln + 1)?,
    );
    let mut mesh = Mesh::default();
    for _ in 0..nn {
        let (ln, l) = lines.next().ok_or_else(|| bad(0, "truncated node block"))?;
        let mut it = l.split_whitespace();
        mesh.nodes.push([num(it.next(), ln + 1)?, num(it.next(), ln + 1)?]);
    }
    for _ in 0..nt {
        let (ln, l) = lines.next().ok_or_else(|| bad(0, "truncated triangle block"))?;
        let mut it = l.split_whitespace();
        let nodes = [
            num(it.next(), ln + 1)?,
            num(it.next(), ln + 1)?,
            num(it.next(), ln + 1)?,
        ];
        let region = match it.next() {
            Some("FLUID") => Region::Fluid,
            Some("HOLE") => Region::Hole,
            _ => return Err(bad(ln + 1, "unknown region")),
        };
        let (cx, cy): (i64, i64) = (num(it.next(), ln + 1)?, num(it.next(), ln + 1)?);
        let cell = (cx >= 0 && cy >= 0).then_some([cx as u32, cy as u32]);
        mesh.triangles.push(Triangle { nodes, region, cell });
    }
    for _ in 0..ne {
        let (ln, l) = lines.next().ok_or_else(|| bad(0, "truncated edge block"))?;
        let mut it = l.split_whitespace();
        let nodes = [num(it.next(), ln + 1)?, num(it.next(), ln + 1)?];
        let tag = match it.next() {
            Some("OUTER") => EdgeTag::Outer,
            Some(t) if t.starts_with("HOLE_BDRY(") && t.ends_with(')') => {
                let inner = &t["HOLE_BDRY(".len()..t.len() - 1];
                let mut parts = inner.split(',');
                EdgeTag::HoleBoundary([num(parts.next(), ln + 1)?, num(parts.next(), ln + 1)?])
            }
            _ => return Err(bad(ln + 1, "unknown edge tag")),
        };
        mesh.boundary_edges.push(BoundaryEdge { nodes, tag });
    }
    let n = mesh.nodes.len();
    if mesh.triangles.iter().any(|t| t.nodes.iter().any(|&i| i >= n))
        || mesh.boundary_edges.iter().any(|e| e.nodes.iter().any(|&i| i >= n))
    {
        return Err(Error::Geometry("mesh text references a missing node".into()));
    }
    Ok(mesh)
}
