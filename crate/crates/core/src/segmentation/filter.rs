use serde::{Deserialize, Serialize};

use crate::mesh::{component_face_sets, mesh_volume, Aabb, TriMesh};
use crate::metrics::obb_iou;
use crate::obb::{Degeneracy, Obb};
use crate::union_find::UnionFind;
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterThresholds {
    pub max_mean_part_iou: f64,
    pub max_largest_rest_ratio: f64,
    pub max_components_per_part: usize,
    pub part_count_range: [usize; 2],
}

impl Default for FilterThresholds {
    fn default() -> Self {
        FilterThresholds {
            max_mean_part_iou: 0.10,
            max_largest_rest_ratio: 3.0,
            max_components_per_part: 1,
            part_count_range: [2, 8],
        }
    }
}

impl FilterThresholds {
    pub fn validate(&self) -> Result<()> {
        let [lo, hi] = self.part_count_range;
        if !(self.max_mean_part_iou > 0.0 && self.max_largest_rest_ratio > 0.0) {
            return Err(Error::Invalid("filter thresholds must be positive".into()));
        }
        if self.max_components_per_part == 0 || lo == 0 || lo > hi {
            return Err(Error::Invalid(format!(
                "invalid filter counts: components {} range [{lo}, {hi}]",
                self.max_components_per_part
            )));
        }
        Ok(())
    }
}

/// Quality statistics of one processed shape.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShapeStats {
    /// Mean IoU over all unordered pairs of part boxes; 0 with fewer than
    /// two parts.
    pub mean_part_iou: f64,
    /// Largest part volume over the summed volume of the others; absent with
    /// fewer than two parts.
    pub largest_rest_ratio: Option<f64>,
    pub part_count: usize,
    pub per_part_volumes: Vec<f64>,
    pub per_part_components: Vec<usize>,
    pub degeneracy: Vec<Degeneracy>,
    /// Parts that are not closed surfaces; their volumes are heuristic.
    pub open_parts: Vec<usize>,
    /// Planar or negligible segments left unmerged for lack of a neighbor.
    pub unmerged_segments: Vec<usize>,
    /// Segments left when merging stopped for lack of contacts.
    pub isolated_segments: Vec<usize>,
}

/// Pieces of `mesh` after grouping vertex-connected components whose AABBs,
/// inflated by `tau`, intersect. Touching sub-meshes therefore count as one.
pub fn contact_components(mesh: &TriMesh, tau: f64) -> usize {
    let sets = component_face_sets(mesh);
    let boxes: Vec<Aabb> = sets
        .iter()
        .map(|faces| {
            Aabb::from_points(faces.iter().flat_map(|&f| mesh.faces[f].map(|v| &mesh.vertices[v])))
                .expect("components are non-empty")
                .inflate(tau)
        })
        .collect();
    let mut uf = UnionFind::new(boxes.len());
    for i in 0..boxes.len() {
        for j in i + 1..boxes.len() {
            if boxes[i].intersects(&boxes[j]) {
                uf.union(i, j);
            }
        }
    }
    uf.groups().len()
}

pub fn compute_stats(parts: &[TriMesh], obbs: &[Obb], degeneracy: Vec<Degeneracy>, tau: f64) -> ShapeStats {
    let n = obbs.len();
    let mut iou_sum = 0.0;
    let mut pairs = 0usize;
    for i in 0..n {
        for j in i + 1..n {
            iou_sum += obb_iou(&obbs[i], &obbs[j]);
            pairs += 1;
        }
    }
    let volumes: Vec<f64> = parts.iter().map(mesh_volume).collect();
    let largest_rest_ratio = (volumes.len() >= 2).then(|| {
        let (imax, &vmax) = volumes
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1).then(b.0.cmp(&a.0)))
            .expect("at least two parts");
        let rest: f64 = volumes
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != imax)
            .map(|(_, v)| v)
            .sum();
        vmax / rest.max(f64::MIN_POSITIVE)
    });
    ShapeStats {
        mean_part_iou: if pairs == 0 { 0.0 } else { iou_sum / pairs as f64 },
        largest_rest_ratio,
        part_count: parts.len(),
        per_part_components: parts.iter().map(|p| contact_components(p, tau)).collect(),
        open_parts: (0..parts.len()).filter(|&i| !parts[i].is_closed()).collect(),
        per_part_volumes: volumes,
        degeneracy,
        unmerged_segments: Vec::new(),
        isolated_segments: Vec::new(),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "criterion", rename_all = "snake_case")]
pub enum RejectReason {
    PartCount { count: usize, range: [usize; 2] },
    Ratio { value: f64, max: f64 },
    Iou { value: f64, max: f64 },
    Components { part: usize, count: usize, max: usize },
}

impl RejectReason {
    pub fn name(&self) -> &'static str {
        match self {
            RejectReason::PartCount { .. } => "part_count",
            RejectReason::Ratio { .. } => "ratio",
            RejectReason::Iou { .. } => "iou",
            RejectReason::Components { .. } => "components",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "decision", content = "reasons", rename_all = "snake_case")]
pub enum FilterDecision {
    Accept,
    Reject(Vec<RejectReason>),
}

impl FilterDecision {
    pub fn is_accept(&self) -> bool {
        matches!(self, FilterDecision::Accept)
    }

    pub fn reasons(&self) -> &[RejectReason] {
        match self {
            FilterDecision::Accept => &[],
            FilterDecision::Reject(r) => r,
        }
    }
}

/// Rejects when any criterion is violated and lists every violation.
pub fn heuristic_filter(stats: &ShapeStats, t: &FilterThresholds) -> FilterDecision {
    let mut reasons = Vec::new();
    let [lo, hi] = t.part_count_range;
    if stats.part_count < lo || stats.part_count > hi {
        reasons.push(RejectReason::PartCount {
            count: stats.part_count,
            range: t.part_count_range,
        });
    }
    if let Some(r) = stats.largest_rest_ratio {
        if r > t.max_largest_rest_ratio {
            reasons.push(RejectReason::Ratio {
                value: r,
                max: t.max_largest_rest_ratio,
            });
        }
    }
    if stats.mean_part_iou > t.max_mean_part_iou {
        reasons.push(RejectReason::Iou {
            value: stats.mean_part_iou,
            max: t.max_mean_part_iou,
        });
    }
    for (part, &count) in stats.per_part_components.iter().enumerate() {
        if count > t.max_components_per_part {
            reasons.push(RejectReason::Components {
                part,
                count,
                max: t.max_components_per_part,
            });
        }
    }
    if reasons.is_empty() {
        FilterDecision::Accept
    } else {
        FilterDecision::Reject(reasons)
    }
}
