use std::path::Path;

use super::{
    auto_merge, compute_stats, heuristic_filter, progressive_merge, FilterDecision, Provenance, Segment, ShapeRecord,
};
use crate::config::PipelineConfig;
use crate::error::{Error, Result};
use crate::mesh::{component_face_sets, load_mesh_auto, normalize_shape, weld_vertices, Aabb, TriMesh};
use crate::obb::fit_min_obb;

#[derive(Clone, Debug, PartialEq)]
pub struct PipelineOutput {
    pub record: ShapeRecord,
    pub decision: FilterDecision,
}

/// Welds every mesh (distance relative to the joint AABB diagonal) and splits
/// it into vertex-connected components, numbered in input order.
pub fn segments_from_meshes(meshes: &[TriMesh], weld_relative: f64) -> Result<Vec<TriMesh>> {
    let diag = meshes
        .iter()
        .filter_map(TriMesh::aabb)
        .reduce(|a, b| a.union(&b))
        .map(|b: Aabb| b.diagonal())
        .ok_or(Error::NoGeometry)?;
    let mut out = Vec::new();
    for mesh in meshes {
        let welded = weld_vertices(mesh, weld_relative * diag);
        for faces in component_face_sets(&welded) {
            out.push(welded.submesh(&faces));
        }
    }
    if out.is_empty() {
        return Err(Error::NoGeometry);
    }
    Ok(out)
}

/// load → flatten → components → normalize → auto-merge (re-normalize) →
/// progressive merge → part boxes → statistics → filter.
pub fn run_pipeline(source: &Path, config: &PipelineConfig) -> Result<PipelineOutput> {
    let cfg = &config.segmentation;
    let meshes = load_mesh_auto(source).map_err(Error::at_stage("load"))?;
    let pieces = segments_from_meshes(&meshes, cfg.weld_relative).map_err(Error::at_stage("components"))?;
    let (normalized, _) = normalize_shape(&pieces).map_err(Error::at_stage("normalize"))?;
    let segments: Vec<Segment> = normalized
        .into_iter()
        .enumerate()
        .filter_map(|(i, m)| Segment::new(i, m))
        .collect();

    let auto = auto_merge(segments, cfg.planar_eps, cfg.volume_eps, cfg.tau).map_err(Error::at_stage("auto_merge"))?;
    let progressive = progressive_merge(auto.segments, cfg.filter.part_count_range, cfg.tau, cfg.merge_fraction);

    let parts: Vec<TriMesh> = progressive.segments.into_iter().map(|s| s.mesh).collect();
    let fits = parts
        .iter()
        .map(|p| fit_min_obb(&p.vertices))
        .collect::<Result<Vec<_>>>()
        .map_err(Error::at_stage("obb"))?;
    let obbs = fits.iter().map(|f| f.obb).collect::<Vec<_>>();
    let mut stats = compute_stats(&parts, &obbs, fits.iter().map(|f| f.degeneracy).collect(), cfg.tau);
    stats.unmerged_segments = auto.unmerged;
    stats.isolated_segments = progressive.isolated;
    let decision = heuristic_filter(&stats, &cfg.filter);

    Ok(PipelineOutput {
        record: ShapeRecord {
            parts,
            obbs,
            prompt: None,
            stats,
            provenance: Provenance {
                source: source.to_string_lossy().into_owned(),
                config_hash: config.hash(),
            },
        },
        decision,
    })
}
