use nalgebra::{Point3, UnitQuaternion, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::SimilarityTransform;
use crate::error::{Error, Result};
use crate::mesh::TriMesh;
use crate::metrics::{check_alignment, obb_iou, Layout};
use crate::obb::{min_obb, Obb};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BeamConfig {
    pub beam_width: usize,
    pub max_iterations: usize,
    pub delta_t: f64,
    /// Relative scale step: candidates use `1 ± delta_s`.
    pub delta_s: f64,
    pub delta_r_deg: f64,
    pub refine_factor: f64,
    pub epsilon: f64,
    /// Search stops once every step is below this.
    pub min_step: f64,
}

impl Default for BeamConfig {
    fn default() -> Self {
        BeamConfig {
            beam_width: 8,
            max_iterations: 50,
            delta_t: 0.02,
            delta_s: 0.02,
            delta_r_deg: 2.0,
            refine_factor: 0.5,
            epsilon: 1e-4,
            min_step: 1e-4,
        }
    }
}

impl BeamConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            self.delta_t,
            self.delta_s,
            self.delta_r_deg,
            self.epsilon,
            self.min_step,
        ];
        if self.beam_width == 0 || positive.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
            return Err(Error::Invalid("beam settings must be positive".into()));
        }
        if !(self.refine_factor > 0.0 && self.refine_factor < 1.0) || self.delta_s >= 1.0 {
            return Err(Error::Invalid(
                "refine_factor must be in (0,1) and delta_s below 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iteration: usize,
    pub best_score: f64,
    pub delta_t: f64,
    pub delta_s: f64,
    pub delta_r_deg: f64,
    pub improved: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Optimized {
    /// Maps the shape onto the layout.
    pub transform: SimilarityTransform,
    pub score: f64,
    pub identity_score: f64,
    pub trace: Vec<TraceRow>,
}

#[derive(Clone)]
struct State {
    transform: SimilarityTransform,
    score: f64,
    key: [i64; 8],
}

fn key_of(t: &SimilarityTransform) -> [i64; 8] {
    let q = t.rotation.quaternion();
    let s = if q.w < 0.0 { -1.0 } else { 1.0 };
    let quant = |v: f64| (v * 1e9).round() as i64;
    [
        quant(t.scale),
        quant(s * q.w),
        quant(s * q.i),
        quant(s * q.j),
        quant(s * q.k),
        quant(t.translation.x),
        quant(t.translation.y),
        quant(t.translation.z),
    ]
}

/// Mean part IoU after moving every part box by `t`. Minimum boxes commute
/// with similarity transforms, so part boxes are fitted once up front.
fn score(part_boxes: &[Option<Obb>], layout: &Layout, t: &SimilarityTransform) -> f64 {
    let total: f64 = part_boxes
        .iter()
        .zip(&layout.boxes)
        .map(|(p, b)| p.as_ref().map_or(0.0, |p| obb_iou(&t.apply_obb(p), b)))
        .sum();
    total / part_boxes.len() as f64
}

/// Beam search for the similarity transform of the whole shape that best
/// aligns part boxes with the layout. Perturbations pivot about the centroid
/// of the layout box centers.
pub fn optimize_layout(parts: &[TriMesh], layout: &Layout, cfg: &BeamConfig) -> Result<Optimized> {
    check_alignment(parts.len(), layout.boxes.len())?;
    cfg.validate()?;
    let part_boxes = parts
        .iter()
        .map(|p| {
            if p.vertices.is_empty() || p.faces.is_empty() {
                Ok(None)
            } else {
                min_obb(&p.vertices).map(Some)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    if part_boxes.iter().all(Option::is_none) {
        return Err(Error::NoGeometry);
    }
    let pivot = Point3::from(
        layout.boxes.iter().fold(Vector3::zeros(), |a, b| a + b.center.coords) / layout.boxes.len() as f64,
    );

    let identity = SimilarityTransform::identity();
    let identity_score = score(&part_boxes, layout, &identity);
    let mut beam = vec![State {
        transform: identity,
        score: identity_score,
        key: key_of(&identity),
    }];
    let mut best = beam[0].clone();
    let (mut dt, mut ds, mut dr) = (cfg.delta_t, cfg.delta_s, cfg.delta_r_deg);
    let mut trace = Vec::new();

    for iteration in 0..cfg.max_iterations {
        let moves = perturbations(&pivot, dt, ds, dr.to_radians());
        let expanded: Vec<State> = beam
            .iter()
            .flat_map(|s| moves.iter().map(move |m| m.after(&s.transform)))
            .collect::<Vec<_>>()
            .into_par_iter()
            .map(|t| State {
                score: score(&part_boxes, layout, &t),
                key: key_of(&t),
                transform: t,
            })
            .collect();

        let mut pool: Vec<State> = beam.into_iter().chain(expanded).collect();
        pool.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.key.cmp(&b.key)));
        pool.dedup_by(|a, b| a.key == b.key);
        pool.truncate(cfg.beam_width);
        beam = pool;

        let top = &beam[0];
        let improved = top.score > best.score + cfg.epsilon;
        if top.score > best.score {
            best = top.clone();
        }
        if !improved {
            dt *= cfg.refine_factor;
            ds *= cfg.refine_factor;
            dr *= cfg.refine_factor;
        }
        trace.push(TraceRow {
            iteration,
            best_score: best.score,
            delta_t: dt,
            delta_s: ds,
            delta_r_deg: dr,
            improved,
        });
        if dt < cfg.min_step && ds < cfg.min_step && dr.to_radians() < cfg.min_step {
            break;
        }
    }

    Ok(Optimized {
        transform: best.transform,
        score: best.score,
        identity_score,
        trace,
    })
}

/// The 14 axis moves: ±translation per axis, ±scale, ±rotation per axis.
fn perturbations(pivot: &Point3<f64>, dt: f64, ds: f64, dr: f64) -> Vec<SimilarityTransform> {
    let mut out = Vec::with_capacity(14);
    let none = UnitQuaternion::identity();
    for k in 0..3 {
        for sign in [1.0, -1.0] {
            let mut d = Vector3::zeros();
            d[k] = sign * dt;
            out.push(SimilarityTransform::about(pivot, 1.0, none, d));
        }
    }
    for sign in [1.0, -1.0] {
        out.push(SimilarityTransform::about(
            pivot,
            1.0 + sign * ds,
            none,
            Vector3::zeros(),
        ));
    }
    for k in 0..3 {
        for sign in [1.0, -1.0] {
            let axis = nalgebra::Unit::new_unchecked(Vector3::ith(k, 1.0));
            let r = UnitQuaternion::from_axis_angle(&axis, sign * dr);
            out.push(SimilarityTransform::about(pivot, 1.0, r, Vector3::zeros()));
        }
    }
    out
}
