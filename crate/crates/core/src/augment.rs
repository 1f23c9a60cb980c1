//! Score combinators and the additive scene-graph prior.
//!
//! `augment_quad` adds `lambda * delta_sg(G_c, G_c')` to every score of
//! caption `c`, against both images. Because the image indicator only compares
//! scores that share a caption, it is unchanged by the prior.

use crate::asym::{delta_sg, AsymConfig};
use crate::embed::EmbeddingStore;
use crate::error::{Error, Result};
use crate::metrics::ScoreQuad;
use crate::sgparse::SceneGraph;

pub const DEFAULT_LAMBDA: f64 = 0.3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AugmentConfig {
    pub lambda: f64,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        AugmentConfig {
            lambda: DEFAULT_LAMBDA,
        }
    }
}

/// Maps a cosine in `[-1, 1]` to `[0, 1]`.
pub fn clip_score(cos: f64) -> Result<f64> {
    if !cos.is_finite() || cos.abs() > 1.0 + 1e-9 {
        return Err(Error::Argument(format!("cosine {cos} outside [-1, 1]")));
    }
    Ok(((1.0 + cos) / 2.0).clamp(0.0, 1.0))
}

/// Probability of the second class of a two-logit softmax:
/// `exp(second) / (exp(first) + exp(second))`.
///
/// Used for ITM heads as `softmax_pair(v_no, v_yes)` and for yes/no scoring
/// as `softmax_pair(z_no, z_yes)`.
pub fn softmax_pair(v_first: f64, v_second: f64) -> Result<f64> {
    if !v_first.is_finite() || !v_second.is_finite() {
        return Err(Error::Argument(format!(
            "non-finite logits ({v_first}, {v_second})"
        )));
    }
    let m = v_first.max(v_second);
    let a = (v_first - m).exp();
    let b = (v_second - m).exp();
    Ok(b / (a + b))
}

/// Graph and embedding context needed to score caption priors.
#[derive(Debug, Clone, Copy)]
pub struct AsymContext<'a> {
    pub config: AsymConfig,
    pub store: &'a EmbeddingStore,
}

/// Priors `(p0, p1)` for caption 0 and caption 1.
pub fn caption_priors(g0: &SceneGraph, g1: &SceneGraph, cfg: &AugmentConfig, ctx: &AsymContext<'_>) -> Result<(f64, f64)> {
    let d01 = delta_sg(&ctx.config, ctx.store, g0, g1)?;
    let d10 = delta_sg(&ctx.config, ctx.store, g1, g0)?;
    Ok((cfg.lambda * d01, cfg.lambda * d10))
}

pub fn augment_quad(q: &ScoreQuad, g0: &SceneGraph, g1: &SceneGraph, cfg: &AugmentConfig, ctx: &AsymContext<'_>) -> Result<ScoreQuad> {
    let (p0, p1) = caption_priors(g0, g1, cfg, ctx)?;
    Ok(apply_priors(q, p0, p1))
}

pub fn apply_priors(q: &ScoreQuad, p0: f64, p1: f64) -> ScoreQuad {
    ScoreQuad {
        s00: q.s00 + p0,
        s01: q.s01 + p0,
        s10: q.s10 + p1,
        s11: q.s11 + p1,
    }
}
