//! Random inputs shared by the benchmarks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use winosg::assignment::CostMatrix;
use winosg::embed::{EmbeddingStore, OovPolicy};
use winosg::sgparse::{EntityMention, Rule, SceneGraph, Triple};

pub const GOLDEN: &str = include_str!("../../core/tests/fixtures/golden.conllu");

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> CostMatrix {
    let entries = (0..rows * cols).map(|_| rng.random_range(-4.0..4.0)).collect();
    CostMatrix::new(rows, cols, entries).expect("finite entries")
}

/// Vocabulary `w0..w{vocab}` with random vectors.
pub fn random_store(rng: &mut ChaCha8Rng, vocab: usize, dim: usize) -> EmbeddingStore {
    let entries = (0..vocab).map(|i| {
        let v: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        (format!("w{i}"), v)
    });
    EmbeddingStore::from_vectors(dim, OovPolicy::Strict, entries).expect("valid vectors")
}

pub fn random_graph(rng: &mut ChaCha8Rng, vocab: usize, triples: usize) -> SceneGraph {
    let mut word = || EntityMention::from_phrase(&format!("w{}", rng.random_range(0..vocab)));
    SceneGraph {
        caption: String::new(),
        triples: (0..triples)
            .map(|_| Triple::new(word(), "rel", Some(word()), Rule::R1))
            .collect(),
    }
}
