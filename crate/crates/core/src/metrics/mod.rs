//! Layout adherence metrics and corpus statistics.

mod iou;
mod stats;
mod voxel;

use nalgebra::{Point3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::{Aabb, TriMesh};
use crate::obb::{min_obb, Obb};

pub use iou::{intersection_volume, obb_iou};
pub use stats::{dataset_stats, Histogram, StatsReport};
pub use voxel::{voxel_iou, voxelize, VoxelGrid, VoxelIou, DEFAULT_RESOLUTION, GRID_HALF_WIDTH};

pub const MAX_BOXES: usize = 8;
pub const DEFAULT_MC_SAMPLES: usize = 1 << 20;
pub const DEFAULT_MC_SEED: u64 = 0xC0DE;

/// Control boxes plus the shape-level prompt.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Layout {
    pub prompt: String,
    pub boxes: Vec<Obb>,
}

impl Layout {
    pub fn new(prompt: impl Into<String>, boxes: Vec<Obb>) -> Result<Self> {
        let l = Layout {
            prompt: prompt.into(),
            boxes,
        };
        l.validate()?;
        Ok(l)
    }

    pub fn validate(&self) -> Result<()> {
        if self.boxes.is_empty() || self.boxes.len() > MAX_BOXES {
            return Err(Error::Invalid(format!(
                "layout must have 1..={MAX_BOXES} boxes, got {}",
                self.boxes.len()
            )));
        }
        if let Some(i) = self.boxes.iter().position(|b| !b.is_valid()) {
            return Err(Error::Invalid(format!("layout box {i} is invalid")));
        }
        Ok(())
    }
}

/// Which box stands for the generated object in [`object_iou`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ObjectBox {
    #[default]
    Obb,
    Aabb,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PartIou {
    pub per_part: Vec<f64>,
    pub mean: f64,
}

/// Per-part IoU between each part's minimum box and its control box.
/// Empty parts score 0.
pub fn part_iou(parts: &[TriMesh], layout: &Layout) -> Result<PartIou> {
    check_alignment(parts.len(), layout.boxes.len())?;
    let per_part = parts
        .iter()
        .zip(&layout.boxes)
        .map(|(p, b)| {
            if p.vertices.is_empty() || p.faces.is_empty() {
                return Ok(0.0);
            }
            Ok(obb_iou(&min_obb(&p.vertices)?, b))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PartIou {
        mean: mean(&per_part),
        per_part,
    })
}

/// Part IoU from precomputed part boxes.
pub fn part_iou_boxes(part_boxes: &[Option<Obb>], layout: &Layout) -> Result<PartIou> {
    check_alignment(part_boxes.len(), layout.boxes.len())?;
    let per_part: Vec<f64> = part_boxes
        .iter()
        .zip(&layout.boxes)
        .map(|(p, b)| p.as_ref().map_or(0.0, |p| obb_iou(p, b)))
        .collect();
    Ok(PartIou {
        mean: mean(&per_part),
        per_part,
    })
}

pub(crate) fn check_alignment(parts: usize, boxes: usize) -> Result<()> {
    if parts != boxes {
        return Err(Error::Alignment { parts, boxes });
    }
    Ok(())
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ObjectIou {
    pub iou: f64,
    pub stderr: f64,
}

/// IoU between the object's box and the union of the control boxes,
/// estimated by stratified sampling over their joint AABB.
pub fn object_iou(
    parts: &[TriMesh],
    layout: &Layout,
    object_box: ObjectBox,
    samples: usize,
    seed: u64,
) -> Result<ObjectIou> {
    let points: Vec<Point3<f64>> = parts.iter().flat_map(|p| p.vertices.iter().copied()).collect();
    if points.is_empty() {
        return Err(Error::NoGeometry);
    }
    let object = match object_box {
        ObjectBox::Obb => min_obb(&points)?,
        ObjectBox::Aabb => Obb::from_aabb(&Aabb::from_points(points.iter()).expect("non-empty")),
    };
    Ok(box_union_iou(&object, &layout.boxes, samples, seed))
}

/// Stratified estimate of `|a ∩ U| / |a ∪ U|` with `U` the union of `boxes`.
pub fn box_union_iou(a: &Obb, boxes: &[Obb], samples: usize, seed: u64) -> ObjectIou {
    let region = boxes.iter().fold(a.aabb(), |acc, b| acc.union(&b.aabb()));
    let m = ((samples.max(1) as f64).cbrt().floor() as usize).max(1);
    let per_cell = samples.max(1).div_ceil(m * m * m);
    let cell = region.extent() / m as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut both, mut either) = (0u64, 0u64);
    for k in 0..m {
        for j in 0..m {
            for i in 0..m {
                let base = region.min + Vector3::new(i as f64, j as f64, k as f64).component_mul(&cell);
                for _ in 0..per_cell {
                    let u = Vector3::new(rng.random::<f64>(), rng.random::<f64>(), rng.random::<f64>());
                    let p = base + u.component_mul(&cell);
                    let in_a = a.contains(&p, 0.0);
                    let in_u = boxes.iter().any(|b| b.contains(&p, 0.0));
                    both += (in_a && in_u) as u64;
                    either += (in_a || in_u) as u64;
                }
            }
        }
    }
    if either == 0 {
        return ObjectIou { iou: 0.0, stderr: 0.0 };
    }
    let p = both as f64 / either as f64;
    ObjectIou {
        iou: p,
        stderr: (p * (1.0 - p) / either as f64).sqrt(),
    }
}

/// Output of the `metrics` command.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub part_iou: Vec<f64>,
    pub mean_part_iou: f64,
    pub object_iou: f64,
    pub object_iou_stderr: f64,
    pub voxel_iou: f64,
}

/// All layout metrics for one shape. Voxel IoU compares the parts against
/// `voxel_reference` when given, else against the union of the control boxes.
#[allow(clippy::too_many_arguments)]
pub fn evaluate(
    parts: &[TriMesh],
    layout: &Layout,
    object_box: ObjectBox,
    samples: usize,
    seed: u64,
    resolution: usize,
    voxel_reference: Option<&[TriMesh]>,
) -> Result<MetricsReport> {
    let pi = part_iou(parts, layout)?;
    let oi = object_iou(parts, layout, object_box, samples, seed)?;
    let reference = match voxel_reference {
        Some(meshes) => voxelize(meshes, resolution)?,
        None => {
            let box_meshes: Vec<TriMesh> = layout.boxes.iter().map(Obb::to_mesh).collect();
            voxelize(&box_meshes, resolution)?
        }
    };
    let vi = voxel_iou(&voxelize(parts, resolution)?, &reference)?;
    Ok(MetricsReport {
        part_iou: pi.per_part,
        mean_part_iou: pi.mean,
        object_iou: oi.iou,
        object_iou_stderr: oi.stderr,
        voxel_iou: vi.iou,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::primitives::box_mesh;

    fn unit_box(c: [f64; 3]) -> Obb {
        Obb::axis_aligned(Point3::from(c), Vector3::repeat(0.5))
    }

    #[test]
    fn layout_json_round_trip() {
        let l = Layout::new("a lamp", vec![unit_box([0.0; 3])]).unwrap();
        let s = serde_json::to_string(&l).unwrap();
        assert_eq!(serde_json::from_str::<Layout>(&s).unwrap(), l);
        assert!(Layout::new("x", vec![]).is_err());
        assert!(Layout::new("x", vec![unit_box([0.0; 3]); 9]).is_err());
    }

    #[test]
    fn filled_boxes_score_one() {
        let parts = vec![
            box_mesh(Point3::new(-0.3, 0.0, 0.0), Vector3::new(0.2, 0.4, 0.6)),
            box_mesh(Point3::new(0.3, 0.0, 0.0), Vector3::new(0.4, 0.2, 0.2)),
        ];
        let layout = Layout::new(
            "",
            vec![
                Obb::axis_aligned(Point3::new(-0.3, 0.0, 0.0), Vector3::new(0.1, 0.2, 0.3)),
                Obb::axis_aligned(Point3::new(0.3, 0.0, 0.0), Vector3::new(0.2, 0.1, 0.1)),
            ],
        )
        .unwrap();
        let r = part_iou(&parts, &layout).unwrap();
        assert!((r.mean - 1.0).abs() < 1e-6);
    }

    #[test]
    fn empty_part_scores_zero_and_mismatch_errors() {
        let parts = vec![box_mesh(Point3::origin(), Vector3::repeat(1.0)), TriMesh::default()];
        let layout = Layout::new("", vec![unit_box([0.0; 3]), unit_box([1.0, 0.0, 0.0])]).unwrap();
        let r = part_iou(&parts, &layout).unwrap();
        assert_eq!(r.per_part[1], 0.0);
        assert!((r.mean - 0.5).abs() < 1e-9);
        assert!(matches!(part_iou(&parts[..1], &layout), Err(Error::Alignment { .. })));
    }

    #[test]
    fn object_iou_cases() {
        let one = Layout::new("", vec![unit_box([0.0; 3])]).unwrap();
        let part = vec![box_mesh(Point3::origin(), Vector3::repeat(1.0))];
        let r = object_iou(&part, &one, ObjectBox::Obb, 1 << 16, DEFAULT_MC_SEED).unwrap();
        assert!((r.iou - 1.0).abs() < 0.01);

        let far = Layout::new("", vec![unit_box([3.0, 0.0, 0.0])]).unwrap();
        assert_eq!(object_iou(&part, &far, ObjectBox::Obb, 1 << 12, 1).unwrap().iou, 0.0);

        let two = Layout::new("", vec![unit_box([0.0; 3]), unit_box([0.5, 0.0, 0.0])]).unwrap();
        let r = object_iou(&part, &two, ObjectBox::Aabb, 1 << 18, DEFAULT_MC_SEED).unwrap();
        assert!((r.iou - 2.0 / 3.0).abs() < 0.01, "{}", r.iou);
        assert!(r.stderr > 0.0 && r.stderr < 0.01);
    }
}
