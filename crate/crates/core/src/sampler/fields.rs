use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{Branch, DenoiseCall, Denoiser, LatentBlock, Velocity};
use crate::error::{Error, Result};

/// Closed-form velocity fields standing in for the network.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum FieldKind {
    /// `v = (x1 − x)/(1 − t)` toward per-part Gaussian targets drawn from
    /// `target_seed`; Euler steps land on the target exactly.
    LinearToTarget { target_seed: u64 },
    /// `v = −rate·x`.
    Contracting { rate: f64 },
    /// `v = a·t²` on the positive branch and `b·t²` on the negative one.
    Quadratic { a: f64, b: f64 },
    /// `v = value` everywhere.
    Constant { value: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct AnalyticField {
    pub kind: FieldKind,
    pub targets: BTreeMap<usize, DMatrix<f64>>,
}

/// Standard-normal matrix from a seed, filled row-major.
pub fn gaussian_tokens(rows: usize, cols: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values: Vec<f64> = (0..rows * cols).map(|_| StandardNormal.sample(&mut rng)).collect();
    DMatrix::from_row_slice(rows, cols, &values)
}

impl AnalyticField {
    /// Materializes targets for the shapes of `blocks`. Part `p` draws from
    /// seed `target_seed + p`.
    pub fn new(kind: FieldKind, blocks: &[LatentBlock]) -> Self {
        let targets = match kind {
            FieldKind::LinearToTarget { target_seed } => blocks
                .iter()
                .map(|b| {
                    let seed = target_seed.wrapping_add(b.part_id as u64);
                    (b.part_id, gaussian_tokens(b.tokens.nrows(), b.tokens.ncols(), seed))
                })
                .collect(),
            _ => BTreeMap::new(),
        };
        AnalyticField { kind, targets }
    }

    pub fn target(&self, part_id: usize) -> Option<&DMatrix<f64>> {
        self.targets.get(&part_id)
    }
}

impl Denoiser for AnalyticField {
    fn velocity(&self, call: &DenoiseCall) -> Result<Velocity> {
        call.latents
            .iter()
            .map(|b| {
                let x = &b.tokens;
                Ok(match &self.kind {
                    FieldKind::LinearToTarget { .. } => {
                        let target = self.targets.get(&b.part_id).ok_or(Error::MissingReference(b.part_id))?;
                        if target.shape() != x.shape() {
                            return Err(Error::ShapeMismatch(format!("target for part {}", b.part_id)));
                        }
                        (target - x) / (1.0 - call.t)
                    }
                    FieldKind::Contracting { rate } => x * -rate,
                    FieldKind::Quadratic { a, b: bn } => {
                        let c = if call.branch == Branch::Positive { *a } else { *bn };
                        DMatrix::from_element(x.nrows(), x.ncols(), c * call.t * call.t)
                    }
                    FieldKind::Constant { value } => DMatrix::from_element(x.nrows(), x.ncols(), *value),
                })
            })
            .collect()
    }
}
