use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{KvSchedule, LatentBlock, Velocity};
use crate::error::{Error, Result};

fn same_shape(a: &DMatrix<f64>, b: &DMatrix<f64>, what: &str) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::ShapeMismatch(format!(
            "{what}: {:?} vs {:?}",
            a.shape(),
            b.shape()
        )));
    }
    Ok(())
}

/// `x + dt·v`, unconditionally for every block.
pub fn rf_step(x: &[LatentBlock], v: &Velocity, t: f64, dt: f64) -> Result<Vec<LatentBlock>> {
    if !(dt > 0.0) {
        return Err(Error::Invalid(format!("step size {dt} must be positive")));
    }
    if t + dt > 1.0 + 1e-9 {
        return Err(Error::Invalid(format!("step from t={t} by {dt} passes t=1")));
    }
    if x.len() != v.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} blocks but {} velocities",
            x.len(),
            v.len()
        )));
    }
    x.iter()
        .zip(v)
        .map(|(b, vb)| {
            same_shape(&b.tokens, vb, "velocity")?;
            Ok(LatentBlock {
                part_id: b.part_id,
                tokens: &b.tokens + vb * dt,
                frozen: b.frozen,
            })
        })
        .collect()
}

/// Guided velocity `v_neg + ω·(v_pos − v_neg)`, evaluated as
/// `(1 − ω)·v_neg + ω·v_pos` so `ω = 0` and `ω = 1` return a branch exactly.
pub fn cfg_combine(v_pos: &Velocity, v_neg: &Velocity, omega: f64) -> Result<Velocity> {
    if v_pos.len() != v_neg.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} vs {} velocity blocks",
            v_pos.len(),
            v_neg.len()
        )));
    }
    v_pos
        .iter()
        .zip(v_neg)
        .map(|(p, n)| {
            same_shape(p, n, "guidance branches")?;
            Ok(p.zip_map(n, |p, n| (1.0 - omega) * n + omega * p))
        })
        .collect()
}

/// Control strength of the negative branch.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnnealState {
    pub alpha_c: f64,
    pub applications: u64,
}

impl Default for AnnealState {
    fn default() -> Self {
        AnnealState {
            alpha_c: 1.0,
            applications: 0,
        }
    }
}

/// One more application of a constant `beta`: `alpha_c = beta^n` after `n`
/// applications, evaluated as a power so it does not drift.
pub fn anneal_step(state: AnnealState, beta: f64) -> AnnealState {
    let applications = state.applications + 1;
    AnnealState {
        alpha_c: beta.powi(i32::try_from(applications).unwrap_or(i32::MAX)),
        applications,
    }
}

/// Restores masked blocks from the reference state with the same part id.
pub fn apply_freeze(latents: &[LatentBlock], reference: &[LatentBlock], mask: &[bool]) -> Result<Vec<LatentBlock>> {
    if mask.len() != latents.len() {
        return Err(Error::ShapeMismatch(format!(
            "mask has {} entries for {} blocks",
            mask.len(),
            latents.len()
        )));
    }
    latents
        .iter()
        .zip(mask)
        .map(|(b, &frozen)| {
            if !frozen {
                return Ok(b.clone());
            }
            let r = reference
                .iter()
                .find(|r| r.part_id == b.part_id)
                .ok_or(Error::MissingReference(b.part_id))?;
            same_shape(&b.tokens, &r.tokens, "frozen reference")?;
            Ok(LatentBlock {
                part_id: b.part_id,
                tokens: r.tokens.clone(),
                frozen: true,
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct KvPair {
    pub keys: DMatrix<f64>,
    pub values: DMatrix<f64>,
}

/// `λ·cached + (1 − λ)·fresh` for keys and values.
pub fn blend_kv(cached: &KvPair, fresh: &KvPair, lambda: f64) -> Result<KvPair> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::Invalid(format!("blend weight {lambda} outside [0, 1]")));
    }
    same_shape(&cached.keys, &fresh.keys, "keys")?;
    same_shape(&cached.values, &fresh.values, "values")?;
    let mix = |c: &DMatrix<f64>, f: &DMatrix<f64>| c.zip_map(f, |c, f| lambda * c + (1.0 - lambda) * f);
    Ok(KvPair {
        keys: mix(&cached.keys, &fresh.keys),
        values: mix(&cached.values, &fresh.values),
    })
}

/// Blend weight at `step` of `total_steps`.
pub fn kv_schedule(step: usize, total_steps: usize, schedule: &KvSchedule) -> f64 {
    match *schedule {
        KvSchedule::Linear { start } => {
            if total_steps <= 1 {
                start
            } else {
                start * (1.0 - step as f64 / (total_steps - 1) as f64)
            }
        }
        KvSchedule::Constant { value } => value,
    }
}

type TsrFn = dyn Fn(Velocity, f64, f64) -> Velocity + Send + Sync;

/// Rescaling hook applied to the guided velocity.
#[derive(Clone, Default)]
pub enum Tsr {
    /// `k·v`.
    #[default]
    ScalarMultiply,
    /// Called as `f(v, k, t)`.
    Custom(Arc<TsrFn>),
}

impl fmt::Debug for Tsr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tsr::ScalarMultiply => f.write_str("ScalarMultiply"),
            Tsr::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

/// Pass-through at `k = 1`; otherwise the configured hook.
pub fn apply_tsr(v: Velocity, k: f64, t: f64, tsr: &Tsr) -> Velocity {
    if k == 1.0 {
        return v;
    }
    match tsr {
        Tsr::ScalarMultiply => v.into_iter().map(|m| m * k).collect(),
        Tsr::Custom(f) => f(v, k, t),
    }
}
