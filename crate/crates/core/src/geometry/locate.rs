use super::{orient, Mesh, Point, Region};

const CONTAIN_TOL: f64 = 1e-10;
const SNAP_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Location {
    pub triangle: usize,
    pub bary: [f64; 3],
}

fn barycentric(mesh: &Mesh, t: usize, p: Point) -> [f64; 3] {
    let [a, b, c] = mesh.vertices(t);
    let area = orient(a, b, c);
    [orient(p, b, c) / area, orient(a, p, c) / area, orient(a, b, p) / area]
}

fn accept(bary: [f64; 3]) -> Option<[f64; 3]> {
    if bary.iter().any(|&l| l < -CONTAIN_TOL) {
        return None;
    }
    let mut l = bary.map(|v| if v < SNAP_TOL { 0.0 } else { v });
    let s: f64 = l.iter().sum();
    l.iter_mut().for_each(|v| *v /= s);
    Some(l)
}

/// Brute-force point location over fluid triangles; the lowest triangle
/// index containing `p` wins.
pub fn locate_point(mesh: &Mesh, p: Point) -> Option<Location> {
    (0..mesh.triangles.len())
        .filter(|&t| mesh.triangles[t].region == Region::Fluid)
        .find_map(|t| accept(barycentric(mesh, t, p)).map(|bary| Location { triangle: t, bary }))
}

/// Bucket-grid accelerated point location with the same tie-breaking as
/// [`locate_point`].
#[derive(Clone, Debug)]
pub struct PointLocator {
    origin: Point,
    cell: [f64; 2],
    dims: [usize; 2],
    buckets: Vec<Vec<u32>>,
}

impl PointLocator {
    pub fn new(mesh: &Mesh) -> Self {
        let fluid: Vec<usize> = (0..mesh.triangles.len())
            .filter(|&t| mesh.triangles[t].region == Region::Fluid)
            .collect();
        let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
        for &t in &fluid {
            for v in mesh.vertices(t) {
                for d in 0..2 {
                    lo[d] = lo[d].min(v[d]);
                    hi[d] = hi[d].max(v[d]);
                }
            }
        }
        if fluid.is_empty() {
            return Self {
                origin: [0.0; 2],
                cell: [1.0; 2],
                dims: [1, 1],
                buckets: vec![Vec::new()],
            };
        }
        let side = ((fluid.len() as f64).sqrt().ceil() as usize).max(1);
        let dims = [side, side];
        let cell = [
            ((hi[0] - lo[0]) / side as f64).max(1e-300),
            ((hi[1] - lo[1]) / side as f64).max(1e-300),
        ];
        let mut buckets = vec![Vec::new(); side * side];
        let this = Self {
            origin: lo,
            cell,
            dims,
            buckets: Vec::new(),
        };
        for &t in &fluid {
            let vs = mesh.vertices(t);
            let pad = [cell[0] * 1e-6, cell[1] * 1e-6];
            let bx0 = vs.iter().map(|v| v[0]).fold(f64::INFINITY, f64::min) - pad[0];
            let by0 = vs.iter().map(|v| v[1]).fold(f64::INFINITY, f64::min) - pad[1];
            let bx1 = vs.iter().map(|v| v[0]).fold(f64::NEG_INFINITY, f64::max) + pad[0];
            let by1 = vs.iter().map(|v| v[1]).fold(f64::NEG_INFINITY, f64::max) + pad[1];
            let [i0, j0] = this.bucket_of([bx0, by0]);
            let [i1, j1] = this.bucket_of([bx1, by1]);
            for j in j0..=j1 {
                for i in i0..=i1 {
                    buckets[j * side + i].push(t as u32);
                }
            }
        }
        Self { buckets, ..this }
    }

    fn bucket_of(&self, p: Point) -> [usize; 2] {
        let f = |d: usize| {
            let k = ((p[d] - self.origin[d]) / self.cell[d]).floor();
            (k.max(0.0) as usize).min(self.dims[d] - 1)
        };
        [f(0), f(1)]
    }

    pub fn locate(&self, mesh: &Mesh, p: Point) -> Option<Location> {
        let [i, j] = self.bucket_of(p);
        self.buckets[j * self.dims[0] + i].iter().find_map(|&t| {
            let t = t as usize;
            accept(barycentric(mesh, t, p)).map(|bary| Location { triangle: t, bary })
        })
    }
}
