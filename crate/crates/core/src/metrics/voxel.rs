//! Solid voxelization on a fixed grid over the normalized frame.

use nalgebra::{Point3, Vector3};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::mesh::{component_face_sets, TriMesh};

/// Half-width of the voxelized region: the unit cube `[-0.5, 0.5]³`
/// inflated by 5%.
pub const GRID_HALF_WIDTH: f64 = 0.525;
pub const DEFAULT_RESOLUTION: usize = 64;

#[derive(Clone, Debug, PartialEq)]
pub struct VoxelGrid {
    pub resolution: usize,
    pub origin: Point3<f64>,
    pub cell_size: f64,
    /// Bit `x + res·(y + res·z)`.
    occupancy: Vec<u64>,
    /// Some input component was open and was rasterized as a surface band.
    pub surface_fallback: bool,
}

impl VoxelGrid {
    /// Empty grid over `[-0.525, 0.525]³`.
    pub fn new(resolution: usize) -> Result<Self> {
        if resolution < 2 {
            return Err(Error::Invalid("voxel resolution must be at least 2".into()));
        }
        let cells = resolution.pow(3);
        Ok(VoxelGrid {
            resolution,
            origin: Point3::from([-GRID_HALF_WIDTH; 3]),
            cell_size: 2.0 * GRID_HALF_WIDTH / resolution as f64,
            occupancy: vec![0; cells.div_ceil(64)],
            surface_fallback: false,
        })
    }

    pub fn cell_volume(&self) -> f64 {
        self.cell_size.powi(3)
    }

    fn index(&self, x: usize, y: usize, z: usize) -> usize {
        x + self.resolution * (y + self.resolution * z)
    }

    pub fn get(&self, x: usize, y: usize, z: usize) -> bool {
        let i = self.index(x, y, z);
        self.occupancy[i / 64] >> (i % 64) & 1 == 1
    }

    pub fn set(&mut self, x: usize, y: usize, z: usize) {
        let i = self.index(x, y, z);
        self.occupancy[i / 64] |= 1 << (i % 64);
    }

    pub fn count(&self) -> usize {
        self.occupancy.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn center(&self, x: usize, y: usize, z: usize) -> Point3<f64> {
        let h = self.cell_size;
        self.origin + Vector3::new(x as f64 + 0.5, y as f64 + 0.5, z as f64 + 0.5) * h
    }

    fn same_frame(&self, other: &VoxelGrid) -> bool {
        self.resolution == other.resolution && self.origin == other.origin && self.cell_size == other.cell_size
    }
}

/// Occupancy of the union of `meshes`. Each closed connected component is
/// filled by ray parity along +x and the results are OR-ed; open components
/// mark every voxel their triangles touch and set `surface_fallback`.
pub fn voxelize(meshes: &[TriMesh], resolution: usize) -> Result<VoxelGrid> {
    let mut grid = VoxelGrid::new(resolution)?;
    for mesh in meshes {
        for faces in component_face_sets(mesh) {
            let comp = mesh.submesh(&faces);
            if comp.is_closed() {
                fill_solid(&mut grid, &comp);
            } else {
                grid.surface_fallback = true;
                fill_surface(&mut grid, &comp);
            }
        }
    }
    Ok(grid)
}

/// IoU of two grids; two empty grids count as identical (`1.0`, flagged).
pub fn voxel_iou(a: &VoxelGrid, b: &VoxelGrid) -> Result<VoxelIou> {
    if !a.same_frame(b) {
        return Err(Error::IncompatibleGrids(format!(
            "resolution {} vs {} or differing origin/cell size",
            a.resolution, b.resolution
        )));
    }
    let (mut inter, mut union) = (0usize, 0usize);
    for (x, y) in a.occupancy.iter().zip(&b.occupancy) {
        inter += (x & y).count_ones() as usize;
        union += (x | y).count_ones() as usize;
    }
    Ok(if union == 0 {
        VoxelIou {
            iou: 1.0,
            both_empty: true,
        }
    } else {
        VoxelIou {
            iou: inter as f64 / union as f64,
            both_empty: false,
        }
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VoxelIou {
    pub iou: f64,
    pub both_empty: bool,
}

/// Crossing of the ray `{(x, py, pz) : x ∈ ℝ}` with triangle `abc`, or
/// `Err(())` when the ray grazes an edge or vertex.
fn ray_hit(a: &Point3<f64>, b: &Point3<f64>, c: &Point3<f64>, py: f64, pz: f64) -> Result<Option<f64>, ()> {
    let e = |p: &Point3<f64>, q: &Point3<f64>| (q.y - p.y) * (pz - p.z) - (q.z - p.z) * (py - p.y);
    let (w0, w1, w2) = (e(b, c), e(c, a), e(a, b));
    let det = w0 + w1 + w2;
    if det == 0.0 {
        // Triangle parallel to the ray; it cannot change parity.
        return Ok(None);
    }
    let scale = det.abs() * 1e-12;
    if w0.abs() <= scale || w1.abs() <= scale || w2.abs() <= scale {
        let inside_closed =
            (w0 >= -scale && w1 >= -scale && w2 >= -scale) || (w0 <= scale && w1 <= scale && w2 <= scale);
        return if inside_closed { Err(()) } else { Ok(None) };
    }
    let same = (w0 > 0.0) == (w1 > 0.0) && (w1 > 0.0) == (w2 > 0.0);
    if !same {
        return Ok(None);
    }
    Ok(Some((w0 * a.x + w1 * b.x + w2 * c.x) / det))
}

fn fill_solid(grid: &mut VoxelGrid, mesh: &TriMesh) {
    let res = grid.resolution;
    let h = grid.cell_size;
    let o = grid.origin;
    let tris: Vec<[Point3<f64>; 3]> = (0..mesh.faces.len()).map(|f| mesh.triangle(f)).collect();

    // Bucket triangles by the rows (y, z) their projection can cover.
    let row_of = |v: f64, o: f64| ((v - o) / h - 0.5).floor();
    let mut buckets: Vec<Vec<u32>> = vec![Vec::new(); res * res];
    for (i, t) in tris.iter().enumerate() {
        let (ymin, ymax) = t
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| (a.min(p.y), b.max(p.y)));
        let (zmin, zmax) = t
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| (a.min(p.z), b.max(p.z)));
        // One row of slack on each side covers jittered retries.
        let clamp = |v: f64| v.clamp(0.0, res as f64 - 1.0) as usize;
        let (y0, y1) = (clamp(row_of(ymin, o.y)), clamp(row_of(ymax, o.y) + 1.0));
        let (z0, z1) = (clamp(row_of(zmin, o.z)), clamp(row_of(zmax, o.z) + 1.0));
        for z in z0..=z1 {
            for y in y0..=y1 {
                buckets[y + res * z].push(i as u32);
            }
        }
    }

    let rows: Vec<(usize, Vec<usize>)> = (0..res * res)
        .into_par_iter()
        .filter(|r| !buckets[*r].is_empty())
        .map(|r| {
            let (y, z) = (r % res, r / res);
            let py = o.y + (y as f64 + 0.5) * h;
            let pz = o.z + (z as f64 + 0.5) * h;
            let hits = row_hits(&tris, &buckets[r], py, pz, h);
            let mut filled = Vec::new();
            for x in 0..res {
                let px = o.x + (x as f64 + 0.5) * h;
                let before = hits.partition_point(|&t| t < px);
                if before % 2 == 1 {
                    filled.push(x);
                }
            }
            (r, filled)
        })
        .collect();
    for (r, xs) in rows {
        for x in xs {
            grid.set(x, r % res, r / res);
        }
    }
}

/// Sorted crossing abscissae along a row; retried with deterministic jitter
/// when the ray grazes an edge or vertex.
fn row_hits(tris: &[[Point3<f64>; 3]], bucket: &[u32], py: f64, pz: f64, h: f64) -> Vec<f64> {
    const JITTER: [(f64, f64); 4] = [(0.0, 0.0), (1.3e-7, 0.7e-7), (-0.9e-7, 1.7e-7), (2.1e-7, -1.1e-7)];
    'attempt: for (jy, jz) in JITTER {
        let (qy, qz) = (py + jy * h, pz + jz * h);
        let mut hits = Vec::new();
        for &i in bucket {
            let [a, b, c] = &tris[i as usize];
            match ray_hit(a, b, c, qy, qz) {
                Ok(Some(x)) => hits.push(x),
                Ok(None) => {}
                Err(()) => continue 'attempt,
            }
        }
        hits.sort_by(f64::total_cmp);
        return hits;
    }
    Vec::new()
}

fn fill_surface(grid: &mut VoxelGrid, mesh: &TriMesh) {
    let res = grid.resolution as i64;
    let h = grid.cell_size;
    let o = grid.origin;
    let half = Vector3::repeat(h * 0.5);
    for f in 0..mesh.faces.len() {
        let t = mesh.triangle(f);
        let lo = t.iter().fold(Vector3::repeat(f64::INFINITY), |a, p| a.inf(&p.coords));
        let hi = t
            .iter()
            .fold(Vector3::repeat(f64::NEG_INFINITY), |a, p| a.sup(&p.coords));
        let cell = |v: f64, o: f64| ((v - o) / h).floor() as i64;
        let (x0, x1) = (cell(lo.x, o.x).max(0), cell(hi.x, o.x).min(res - 1));
        let (y0, y1) = (cell(lo.y, o.y).max(0), cell(hi.y, o.y).min(res - 1));
        let (z0, z1) = (cell(lo.z, o.z).max(0), cell(hi.z, o.z).min(res - 1));
        for z in z0..=z1 {
            for y in y0..=y1 {
                for x in x0..=x1 {
                    let (x, y, z) = (x as usize, y as usize, z as usize);
                    if tri_box_overlap(&grid.center(x, y, z), &half, &t) {
                        grid.set(x, y, z);
                    }
                }
            }
        }
    }
}

/// Separating-axis test between a triangle and an axis-aligned box.
fn tri_box_overlap(center: &Point3<f64>, half: &Vector3<f64>, tri: &[Point3<f64>; 3]) -> bool {
    let v = tri.map(|p| p - center);
    let e = [v[1] - v[0], v[2] - v[1], v[0] - v[2]];
    let separated = |axis: Vector3<f64>| {
        if axis.norm_squared() < 1e-30 {
            return false;
        }
        let p = v.map(|w| w.dot(&axis));
        let r = half.x * axis.x.abs() + half.y * axis.y.abs() + half.z * axis.z.abs();
        p.iter().copied().fold(f64::INFINITY, f64::min) > r || p.iter().copied().fold(f64::NEG_INFINITY, f64::max) < -r
    };
    for ei in &e {
        for k in 0..3 {
            let mut a = Vector3::zeros();
            a[k] = 1.0;
            if separated(a.cross(ei)) {
                return false;
            }
        }
    }
    for k in 0..3 {
        let mut a = Vector3::zeros();
        a[k] = 1.0;
        if separated(a) {
            return false;
        }
    }
    !separated(e[0].cross(&e[1]))
}
