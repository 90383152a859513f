use std::path::Path;

use anyhow::Context;
use partkit_core::mesh::{connected_components, load_mesh_auto, TriMesh};
use partkit_core::obb::{fit_min_obb, Degeneracy};
use partkit_core::Obb;
use serde::Serialize;

use crate::error::CliResult;
use crate::io::emit_json;

#[derive(Serialize)]
struct Fit {
    obb: Obb,
    volume: f64,
    degeneracy: Degeneracy,
}

#[derive(Serialize)]
struct Report {
    source: String,
    object: Fit,
    #[serde(skip_serializing_if = "Option::is_none")]
    components: Option<Vec<Fit>>,
}

fn fit(mesh: &TriMesh) -> CliResult<Fit> {
    let f = fit_min_obb(&mesh.vertices)?;
    Ok(Fit {
        obb: f.obb,
        volume: f.obb.volume(),
        degeneracy: f.degeneracy,
    })
}

pub fn run(input: &Path, components: bool, out: Option<&Path>) -> CliResult<()> {
    let meshes = load_mesh_auto(input).with_context(|| format!("loading {}", input.display()))?;
    let all = TriMesh::concat(meshes.iter());
    let components = if components {
        Some(
            connected_components(&all)
                .iter()
                .map(fit)
                .collect::<CliResult<Vec<_>>>()?,
        )
    } else {
        None
    };
    let report = Report {
        source: input.to_string_lossy().into_owned(),
        object: fit(&all)?,
        components,
    };
    emit_json(&report, out)
}
