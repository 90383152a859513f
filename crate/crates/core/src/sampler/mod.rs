//! Rectified-flow sampling loop around an injected denoiser: guidance,
//! control annealing on the negative branch, part freezing and key/value
//! reinjection.

mod fields;
mod io;
mod ops;

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use fields::{gaussian_tokens, AnalyticField, FieldKind};
pub use io::{read_latents, write_latents, write_trace_csv, LATENT_MAGIC, LATENT_VERSION};
pub use ops::{
    anneal_step, apply_freeze, apply_tsr, blend_kv, cfg_combine, kv_schedule, rf_step, AnnealState, KvPair, Tsr,
};

pub const DEFAULT_NEGATIVE_PROMPT: &str = "Low-poly, minimal, blocky";

/// Token matrix of one part.
#[derive(Clone, Debug, PartialEq)]
pub struct LatentBlock {
    pub part_id: usize,
    pub tokens: DMatrix<f64>,
    pub frozen: bool,
}

impl LatentBlock {
    pub fn new(part_id: usize, tokens: DMatrix<f64>) -> Result<Self> {
        let b = LatentBlock {
            part_id,
            tokens,
            frozen: false,
        };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        if self.tokens.nrows() == 0 || self.tokens.ncols() == 0 {
            return Err(Error::Invalid(format!(
                "part {} has an empty token matrix",
                self.part_id
            )));
        }
        if self.tokens.iter().any(|v| !v.is_finite()) {
            return Err(Error::Invalid(format!("part {} has a non-finite token", self.part_id)));
        }
        Ok(())
    }
}

/// One velocity matrix per latent block, in block order.
pub type Velocity = Vec<DMatrix<f64>>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    Positive,
    Negative,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum KvSchedule {
    /// `λ(i) = start·(1 − i/(N−1))`.
    Linear {
        start: f64,
    },
    Constant {
        value: f64,
    },
}

impl Default for KvSchedule {
    fn default() -> Self {
        KvSchedule::Linear { start: 0.8 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerConfig {
    pub steps: usize,
    pub cfg_scale: f64,
    pub anneal_beta: f64,
    pub tsr_k: f64,
    /// Layout cross-attention passes per denoiser call.
    pub layers_per_pass: usize,
    pub negative_prompt: String,
    pub kv_blend_schedule: KvSchedule,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            steps: 50,
            cfg_scale: 6.5,
            anneal_beta: 0.99,
            tsr_k: 0.98,
            layers_per_pass: 1,
            negative_prompt: DEFAULT_NEGATIVE_PROMPT.into(),
            kv_blend_schedule: KvSchedule::default(),
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 || self.layers_per_pass == 0 {
            return Err(Error::Invalid("steps and layers_per_pass must be at least 1".into()));
        }
        if !self.cfg_scale.is_finite() {
            return Err(Error::Invalid("cfg_scale must be finite".into()));
        }
        if !(self.anneal_beta > 0.0 && self.anneal_beta <= 1.0) {
            return Err(Error::Invalid("anneal_beta must be in (0, 1]".into()));
        }
        if !(self.tsr_k > 0.0 && self.tsr_k <= 1.0) {
            return Err(Error::Invalid("tsr_k must be in (0, 1]".into()));
        }
        let lambda = match self.kv_blend_schedule {
            KvSchedule::Linear { start } => start,
            KvSchedule::Constant { value } => value,
        };
        if !(0.0..=1.0).contains(&lambda) {
            return Err(Error::Invalid("kv blend weight must be in [0, 1]".into()));
        }
        Ok(())
    }
}

/// Everything the denoiser sees for one branch evaluation.
pub struct DenoiseCall<'a> {
    pub latents: &'a [LatentBlock],
    pub t: f64,
    pub step: usize,
    /// Control strength per layout cross-attention layer.
    pub alphas: &'a [f64],
    pub branch: Branch,
    pub prompt: &'a str,
    /// Blended keys/values per `(layer, part_id)` when reinjection is on.
    pub kv: Option<&'a BTreeMap<(usize, usize), KvPair>>,
}

/// The network boundary: a velocity for every block.
pub trait Denoiser {
    fn velocity(&self, call: &DenoiseCall) -> Result<Velocity>;

    /// Fresh keys/values of a part at a layer, for reinjection. Denoisers
    /// without attention return `None`.
    fn fresh_kv(&self, _call: &DenoiseCall, _layer: usize, _part_id: usize) -> Option<KvPair> {
        None
    }
}

/// Cached keys/values per `(step, layer, part_id)`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct KvCache {
    pub entries: BTreeMap<(usize, usize, usize), KvPair>,
}

#[derive(Clone, Debug, Default)]
pub struct SampleOptions<'a> {
    pub prompt: &'a str,
    /// Per block: restore from `reference` after every step.
    pub freeze_mask: Option<&'a [bool]>,
    /// Reference states, `steps + 1` entries starting at the initial latents.
    pub reference: Option<&'a [Vec<LatentBlock>]>,
    pub kv_cache: Option<&'a KvCache>,
    pub tsr: Tsr,
    pub record_trajectory: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepTrace {
    pub step: usize,
    pub t: f64,
    /// Negative-branch control strength per layer.
    pub alphas: Vec<f64>,
    /// Control strength handed to the positive branch (always 1).
    pub positive_alpha: f64,
    pub lambda: f64,
    /// `(part_id, L2 norm)` after the step.
    pub norms: Vec<(usize, f64)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SampleOutput {
    pub latents: Vec<LatentBlock>,
    pub trace: Vec<StepTrace>,
    /// States at `t = 0, 1/N, …, 1` when requested.
    pub trajectory: Vec<Vec<LatentBlock>>,
    pub anneal: AnnealState,
}

/// Euler integration from `t = 0` (noise) to `t = 1` (data) in
/// `config.steps` steps. Per step: positive branch with full control,
/// negative branch with annealed control, guidance, TSR, Euler step, freeze.
pub fn sample(
    denoiser: &dyn Denoiser,
    initial: Vec<LatentBlock>,
    config: &SamplerConfig,
    opts: &SampleOptions,
) -> Result<SampleOutput> {
    config.validate()?;
    for b in &initial {
        b.validate()?;
    }
    let n = config.steps;
    let layers = config.layers_per_pass;
    let dt = 1.0 / n as f64;
    if let Some(mask) = opts.freeze_mask {
        if mask.len() != initial.len() {
            return Err(Error::ShapeMismatch(format!(
                "freeze mask has {} entries for {} blocks",
                mask.len(),
                initial.len()
            )));
        }
        if mask.iter().any(|&m| m) {
            let reference = opts.reference.ok_or_else(|| {
                let first = mask.iter().position(|&m| m).unwrap_or(0);
                Error::MissingReference(initial[first].part_id)
            })?;
            if reference.len() < n + 1 {
                return Err(Error::ShapeMismatch(format!(
                    "reference trajectory has {} states, need {}",
                    reference.len(),
                    n + 1
                )));
            }
        }
    }
    let freeze = |x: Vec<LatentBlock>, i: usize| -> Result<Vec<LatentBlock>> {
        match (opts.freeze_mask, opts.reference) {
            (Some(mask), Some(reference)) if mask.iter().any(|&m| m) => apply_freeze(&x, &reference[i], mask),
            _ => Ok(x),
        }
    };

    let mut x = freeze(initial, 0)?;
    let mut anneal = AnnealState::default();
    let mut trace = Vec::with_capacity(n);
    let mut trajectory = Vec::new();
    if opts.record_trajectory {
        trajectory.push(x.clone());
    }
    let full = vec![1.0; layers];

    for i in 0..n {
        let t = i as f64 * dt;
        let at_step = |e: Error| Error::AtStep {
            step: i,
            source: Box::new(e),
        };
        let mut alphas = Vec::with_capacity(layers);
        for _ in 0..layers {
            alphas.push(anneal.alpha_c);
            anneal = anneal_step(anneal, config.anneal_beta);
        }
        let lambda = kv_schedule(i, n, &config.kv_blend_schedule);

        let blended = match opts.kv_cache {
            Some(cache) => Some(blend_step(denoiser, cache, &x, t, i, layers, lambda, opts.prompt).map_err(at_step)?),
            None => None,
        };
        let call = |alphas: &[f64], branch: Branch, prompt: &str| {
            denoiser.velocity(&DenoiseCall {
                latents: &x,
                t,
                step: i,
                alphas,
                branch,
                prompt,
                kv: blended.as_ref(),
            })
        };
        let v_pos = call(&full, Branch::Positive, opts.prompt).map_err(at_step)?;
        let v_neg = call(&alphas, Branch::Negative, &config.negative_prompt).map_err(at_step)?;
        let v = cfg_combine(&v_pos, &v_neg, config.cfg_scale).map_err(at_step)?;
        let v = apply_tsr(v, config.tsr_k, t, &opts.tsr);
        x = rf_step(&x, &v, t, dt).map_err(at_step)?;
        x = freeze(x, i + 1).map_err(at_step)?;

        trace.push(StepTrace {
            step: i,
            t,
            alphas,
            positive_alpha: 1.0,
            lambda,
            norms: x.iter().map(|b| (b.part_id, b.tokens.norm())).collect(),
        });
        if opts.record_trajectory {
            trajectory.push(x.clone());
        }
    }
    Ok(SampleOutput {
        latents: x,
        trace,
        trajectory,
        anneal,
    })
}

#[allow(clippy::too_many_arguments)]
fn blend_step(
    denoiser: &dyn Denoiser,
    cache: &KvCache,
    x: &[LatentBlock],
    t: f64,
    step: usize,
    layers: usize,
    lambda: f64,
    prompt: &str,
) -> Result<BTreeMap<(usize, usize), KvPair>> {
    let probe = DenoiseCall {
        latents: x,
        t,
        step,
        alphas: &[],
        branch: Branch::Positive,
        prompt,
        kv: None,
    };
    let mut out = BTreeMap::new();
    for layer in 0..layers {
        for b in x {
            let Some(cached) = cache.entries.get(&(step, layer, b.part_id)) else {
                continue;
            };
            if let Some(fresh) = denoiser.fresh_kv(&probe, layer, b.part_id) {
                out.insert((layer, b.part_id), blend_kv(cached, &fresh, lambda)?);
            }
        }
    }
    Ok(out)
}
