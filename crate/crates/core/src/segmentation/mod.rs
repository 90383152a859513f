//! Dataset pipeline: raw meshes to part-segmented records with box layouts.

mod filter;
mod pipeline;
mod record;

use serde::{Deserialize, Serialize};

use crate::mesh::{mesh_volume, Aabb, NormalizationTransform, TriMesh};
use crate::obb::min_obb;
use crate::union_find::UnionFind;

pub use filter::{
    compute_stats, contact_components, heuristic_filter, FilterDecision, FilterThresholds, RejectReason, ShapeStats,
};
pub use pipeline::{run_pipeline, segments_from_meshes, PipelineOutput};
pub use record::{part_file_name, Provenance, RecordFile, ShapeRecord, RECORD_FILE};

/// A piece of a shape with its cached volume and bounds.
#[derive(Clone, Debug, PartialEq)]
pub struct Segment {
    pub id: usize,
    pub mesh: TriMesh,
    pub volume: f64,
    pub aabb: Aabb,
}

impl Segment {
    /// `None` for meshes without vertices.
    pub fn new(id: usize, mesh: TriMesh) -> Option<Segment> {
        let aabb = mesh.aabb()?;
        Some(Segment {
            id,
            volume: mesh_volume(&mesh),
            aabb,
            mesh,
        })
    }

    fn merged(group: &[&Segment]) -> Segment {
        let id = group.iter().map(|s| s.id).min().expect("non-empty group");
        let mut sorted = group.to_vec();
        sorted.sort_by_key(|s| s.id);
        let mut mesh = TriMesh::concat(sorted.iter().map(|s| &s.mesh));
        mesh.name = sorted[0].mesh.name.clone();
        Segment::new(id, mesh).expect("merged segments have vertices")
    }
}

/// Segments `i` and `j` are adjacent when their AABBs, each inflated by
/// `tau`, intersect. Lists are sorted and hold slice indices.
pub fn build_contact_graph(segments: &[Segment], tau: f64) -> Vec<Vec<usize>> {
    let boxes: Vec<Aabb> = segments.iter().map(|s| s.aabb.inflate(tau)).collect();
    let mut adj = vec![Vec::new(); segments.len()];
    for i in 0..boxes.len() {
        for j in i + 1..boxes.len() {
            if boxes[i].intersects(&boxes[j]) {
                adj[i].push(j);
                adj[j].push(i);
            }
        }
    }
    adj
}

/// Neighbor with the largest volume, ties to the smaller id.
fn largest_neighbor(segments: &[Segment], neighbors: &[usize]) -> Option<usize> {
    neighbors.iter().copied().max_by(|&a, &b| {
        segments[a]
            .volume
            .total_cmp(&segments[b].volume)
            .then(segments[b].id.cmp(&segments[a].id))
    })
}

/// Applies all `(from, into)` tags at once; chains collapse through
/// union-find. Output is ordered by id.
fn execute_tags(segments: Vec<Segment>, tags: &[(usize, usize)]) -> Vec<Segment> {
    if tags.is_empty() {
        return segments;
    }
    let mut uf = UnionFind::new(segments.len());
    for &(a, b) in tags {
        uf.union(a, b);
    }
    let mut out: Vec<Segment> = uf
        .groups()
        .into_iter()
        .map(|g| {
            if g.len() == 1 {
                segments[g[0]].clone()
            } else {
                Segment::merged(&g.iter().map(|&i| &segments[i]).collect::<Vec<_>>())
            }
        })
        .collect();
    out.sort_by_key(|s| s.id);
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct AutoMerge {
    pub segments: Vec<Segment>,
    /// Ids of planar or negligible segments that had no neighbor.
    pub unmerged: Vec<usize>,
    /// Re-normalization applied after merging.
    pub transform: NormalizationTransform,
}

/// Fuses planar segments (smallest min-box half-extent below `planar_eps`)
/// and negligible ones (volume below `volume_eps`) into their largest contact
/// neighbor, then re-normalizes.
pub fn auto_merge(segments: Vec<Segment>, planar_eps: f64, volume_eps: f64, tau: f64) -> crate::Result<AutoMerge> {
    let graph = build_contact_graph(&segments, tau);
    let mut tags = Vec::new();
    let mut unmerged = Vec::new();
    for (i, s) in segments.iter().enumerate() {
        let thin = min_obb(&s.mesh.vertices)?.half_extents.min() < planar_eps;
        if !(thin || s.volume < volume_eps) {
            continue;
        }
        match largest_neighbor(&segments, &graph[i]) {
            Some(j) => tags.push((i, j)),
            None => unmerged.push(s.id),
        }
    }
    let merged = execute_tags(segments, &tags);
    let meshes: Vec<TriMesh> = merged.iter().map(|s| s.mesh.clone()).collect();
    let (normalized, transform) = crate::mesh::normalize_shape(&meshes)?;
    let segments = merged
        .iter()
        .zip(normalized)
        .map(|(s, m)| Segment::new(s.id, m).expect("vertices preserved"))
        .collect();
    Ok(AutoMerge {
        segments,
        unmerged,
        transform,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProgressiveMerge {
    pub segments: Vec<Segment>,
    /// Segment count after each iteration.
    pub counts: Vec<usize>,
    /// Set when merging stopped above the range because no segment touched
    /// another; holds the ids left.
    pub isolated: Vec<usize>,
}

/// Repeatedly merges the `k = max(1, ⌈fraction·n⌉)` smallest segments that
/// have a contact neighbor into their largest neighbor, all tags in one pass,
/// until the count is at most `range[1]`. Never goes below `range[0]`.
pub fn progressive_merge(mut segments: Vec<Segment>, range: [usize; 2], tau: f64, fraction: f64) -> ProgressiveMerge {
    let [lo, hi] = range;
    let mut counts = Vec::new();
    let mut isolated = Vec::new();
    while segments.len() > hi {
        let n = segments.len();
        let graph = build_contact_graph(&segments, tau);
        let mut candidates: Vec<usize> = (0..n).filter(|&i| !graph[i].is_empty()).collect();
        if candidates.is_empty() {
            isolated = segments.iter().map(|s| s.id).collect();
            break;
        }
        candidates.sort_by(|&a, &b| {
            segments[a]
                .volume
                .total_cmp(&segments[b].volume)
                .then(segments[a].id.cmp(&segments[b].id))
        });
        let k = ((fraction * n as f64).ceil() as usize)
            .max(1)
            .min(n.saturating_sub(lo))
            .max(1);
        let tags: Vec<(usize, usize)> = candidates
            .iter()
            .take(k)
            .map(|&i| {
                (
                    i,
                    largest_neighbor(&segments, &graph[i]).expect("candidate has neighbors"),
                )
            })
            .collect();
        segments = execute_tags(segments, &tags);
        counts.push(segments.len());
    }
    ProgressiveMerge {
        segments,
        counts,
        isolated,
    }
}

/// Configuration of the segmentation stages.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SegmentationConfig {
    /// Weld distance as a fraction of the raw AABB diagonal.
    pub weld_relative: f64,
    pub planar_eps: f64,
    pub volume_eps: f64,
    pub tau: f64,
    /// Fraction of segments merged per progressive iteration.
    pub merge_fraction: f64,
    pub filter: FilterThresholds,
}

impl Default for SegmentationConfig {
    fn default() -> Self {
        SegmentationConfig {
            weld_relative: 1e-6,
            planar_eps: 1e-3,
            volume_eps: 1e-6,
            tau: 5e-3,
            merge_fraction: 0.2,
            filter: FilterThresholds::default(),
        }
    }
}

impl SegmentationConfig {
    pub fn validate(&self) -> crate::Result<()> {
        let positive = [
            ("weld_relative", self.weld_relative),
            ("planar_eps", self.planar_eps),
            ("volume_eps", self.volume_eps),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(crate::Error::Invalid(format!("segmentation.{name} must be positive")));
            }
        }
        if !(self.tau >= 0.0 && self.tau.is_finite()) {
            return Err(crate::Error::Invalid("segmentation.tau must be non-negative".into()));
        }
        if !(self.merge_fraction > 0.0 && self.merge_fraction <= 1.0) {
            return Err(crate::Error::Invalid(
                "segmentation.merge_fraction must be in (0, 1]".into(),
            ));
        }
        self.filter.validate()
    }
}
