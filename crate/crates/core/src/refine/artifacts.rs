use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::{component_face_sets, mesh_volume, TriMesh};
use crate::metrics::{check_alignment, obb_iou, Layout};
use crate::obb::min_obb;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum PartAction {
    /// Single component (or empty); passed through unchanged.
    Untouched,
    /// Only the largest component was kept.
    Cleaned {
        iou: f64,
        removed_components: usize,
        removed_faces: usize,
    },
    /// Several components, but the largest one did not match its box well
    /// enough to be trusted; left unchanged.
    Flagged { iou: f64, components: usize },
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ArtifactReport {
    pub parts: Vec<PartAction>,
}

/// For every multi-component part, keeps only its largest component (by
/// volume, then face count) when that component's minimum box has IoU at
/// least `theta` with the part's control box.
pub fn filter_artifacts(parts: &[TriMesh], layout: &Layout, theta: f64) -> Result<(Vec<TriMesh>, ArtifactReport)> {
    check_alignment(parts.len(), layout.boxes.len())?;
    if !(theta > 0.0 && theta <= 1.0) {
        return Err(Error::Invalid(format!("artifact threshold {theta} is not in (0, 1]")));
    }
    let mut out = Vec::with_capacity(parts.len());
    let mut report = ArtifactReport::default();
    for (part, control) in parts.iter().zip(&layout.boxes) {
        let comps = component_face_sets(part);
        if comps.len() <= 1 {
            out.push(part.clone());
            report.parts.push(PartAction::Untouched);
            continue;
        }
        let meshes: Vec<TriMesh> = comps.iter().map(|f| part.submesh(f)).collect();
        let largest = (0..meshes.len())
            .max_by(|&a, &b| {
                mesh_volume(&meshes[a])
                    .total_cmp(&mesh_volume(&meshes[b]))
                    .then(comps[a].len().cmp(&comps[b].len()))
                    .then(b.cmp(&a))
            })
            .expect("several components");
        let iou = obb_iou(&min_obb(&meshes[largest].vertices)?, control);
        if iou >= theta {
            report.parts.push(PartAction::Cleaned {
                iou,
                removed_components: comps.len() - 1,
                removed_faces: part.faces.len() - comps[largest].len(),
            });
            out.push(meshes.into_iter().nth(largest).expect("index in range"));
        } else {
            report.parts.push(PartAction::Flagged {
                iou,
                components: comps.len(),
            });
            out.push(part.clone());
        }
    }
    Ok((out, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::primitives::box_mesh;
    use crate::obb::Obb;
    use nalgebra::{Point3, Vector3};

    fn control() -> Layout {
        Layout::new(
            "",
            vec![Obb::axis_aligned(Point3::origin(), Vector3::new(0.4, 0.1, 0.3))],
        )
        .unwrap()
    }

    #[test]
    fn floater_is_removed() {
        let slab = box_mesh(Point3::origin(), Vector3::new(0.8, 0.2, 0.6));
        let floater = box_mesh(Point3::new(0.9, 0.0, 0.0), Vector3::repeat(0.05));
        let part = TriMesh::concat([&slab, &floater]);
        let (out, report) = filter_artifacts(&[part], &control(), 0.5).unwrap();
        assert_eq!(out[0].faces.len(), 12);
        assert_eq!(out[0].vertices, slab.vertices);
        assert!(matches!(
            report.parts[0],
            PartAction::Cleaned {
                removed_components: 1,
                ..
            }
        ));
        let (again, _) = filter_artifacts(&out, &control(), 0.5).unwrap();
        assert_eq!(again, out);
    }

    #[test]
    fn single_component_passes_through() {
        let slab = box_mesh(Point3::new(0.01, 0.0, 0.0), Vector3::new(0.8, 0.2, 0.6));
        let (out, report) = filter_artifacts(std::slice::from_ref(&slab), &control(), 0.5).unwrap();
        assert_eq!(out[0], slab);
        assert_eq!(report.parts[0], PartAction::Untouched);
    }

    #[test]
    fn poor_match_is_flagged() {
        let a = box_mesh(Point3::new(0.0, 0.5, 0.0), Vector3::new(0.4, 0.2, 0.3));
        let b = box_mesh(Point3::new(0.0, -0.5, 0.0), Vector3::repeat(0.05));
        let part = TriMesh::concat([&a, &b]);
        let (out, report) = filter_artifacts(std::slice::from_ref(&part), &control(), 0.5).unwrap();
        assert_eq!(out[0], part);
        assert!(matches!(report.parts[0], PartAction::Flagged { components: 2, .. }));
    }
}
