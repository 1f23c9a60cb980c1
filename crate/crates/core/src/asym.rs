//! Graph asymmetry scoring.
//!
//! For triples `a = <s_a, r_a, o_a>` and `b = <s_b, r_b, o_b>` the pairwise
//! asymmetry is
//!
//! ```text
//! A(a, b) = alpha * (cos(s_a, s_b) - cos(s_a, o_b))
//!         + gamma * (cos(o_a, o_b) - cos(o_a, s_b))
//! ```
//!
//! Relations do not enter. Two scene graphs are compared by building the
//! matrix `C[i][j] = A(a_i, b_j)`, solving the assignment problem on it, and
//! averaging the matched entries. Triples without an object cannot be scored
//! and are left out of the matrix.

use crate::assignment::{solve_assignment, CostMatrix, Objective};
use crate::embed::EmbeddingStore;
use crate::error::{Error, Result};
use crate::sgparse::{SceneGraph, Triple};

/// Denominator of the matched-cost average.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MatchNorm {
    /// Number of matched pairs, `min(rows, cols)`.
    #[default]
    Matched,
    /// Size of the larger graph, so unmatched triples count as zero.
    Larger,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AsymConfig {
    pub alpha: f64,
    pub gamma: f64,
    pub objective: Objective,
    pub norm: MatchNorm,
}

impl Default for AsymConfig {
    fn default() -> Self {
        AsymConfig {
            alpha: 1.0,
            gamma: 1.0,
            objective: Objective::Maximize,
            norm: MatchNorm::Matched,
        }
    }
}

impl AsymConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.alpha.is_finite() || !self.gamma.is_finite() {
            return Err(Error::Argument(format!(
                "alpha and gamma must be finite (alpha={}, gamma={})",
                self.alpha, self.gamma
            )));
        }
        Ok(())
    }
}

/// `A(t_a, t_b)`. Both triples need an object.
pub fn pairwise_asymmetry(cfg: &AsymConfig, store: &EmbeddingStore, t_a: &Triple, t_b: &Triple) -> Result<f64> {
    let (Some(o_a), Some(o_b)) = (&t_a.object, &t_b.object) else {
        return Err(Error::Argument(format!(
            "asymmetry needs triples with objects, got {t_a} and {t_b}"
        )));
    };
    let s_a = &t_a.subject.phrase;
    let s_b = &t_b.subject.phrase;
    let (o_a, o_b) = (&o_a.phrase, &o_b.phrase);
    let subject_term = store.cos_sim(s_a, s_b)? - store.cos_sim(s_a, o_b)?;
    let object_term = store.cos_sim(o_a, o_b)? - store.cos_sim(o_a, s_b)?;
    Ok(cfg.alpha * subject_term + cfg.gamma * object_term)
}

/// Triples of `g` that take part in asymmetry scoring.
pub fn usable_triples(g: &SceneGraph) -> Vec<&Triple> {
    g.triples.iter().filter(|t| t.object.is_some()).collect()
}

pub fn build_cost_matrix(cfg: &AsymConfig, store: &EmbeddingStore, g_a: &SceneGraph, g_b: &SceneGraph) -> Result<CostMatrix> {
    let rows = usable_triples(g_a);
    let cols = usable_triples(g_b);
    if rows.is_empty() || cols.is_empty() {
        return Ok(CostMatrix::empty(rows.len(), cols.len()));
    }
    let mut entries = Vec::with_capacity(rows.len() * cols.len());
    for a in &rows {
        for b in &cols {
            entries.push(pairwise_asymmetry(cfg, store, a, b)?);
        }
    }
    CostMatrix::new(rows.len(), cols.len(), entries)
}

/// Mean matched asymmetry between two graphs; 0 when either has no usable triple.
pub fn delta_sg(cfg: &AsymConfig, store: &EmbeddingStore, g_a: &SceneGraph, g_b: &SceneGraph) -> Result<f64> {
    let matrix = build_cost_matrix(cfg, store, g_a, g_b)?;
    Ok(delta_from_matrix(&matrix, cfg))
}

pub fn delta_from_matrix(matrix: &CostMatrix, cfg: &AsymConfig) -> f64 {
    if matrix.is_empty() {
        return 0.0;
    }
    let pairs = solve_assignment(matrix, cfg.objective);
    let denom = match cfg.norm {
        MatchNorm::Matched => pairs.len(),
        MatchNorm::Larger => matrix.rows().max(matrix.cols()),
    };
    matrix.total(&pairs) / denom as f64
}
