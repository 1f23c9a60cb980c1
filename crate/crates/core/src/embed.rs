//! Phrase embeddings and cosine similarity.
//!
//! The table is read from a TSV file: a `#dim D` header, then one
//! `token<TAB>v1 v2 ... vD` line per entry. Vectors are L2-normalized at load
//! time, so similarity is a plain dot product.

use std::collections::HashMap;
use std::io::BufRead;

use log::warn;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OovPolicy {
    /// A phrase with no known token is an error.
    #[default]
    Strict,
    /// A phrase with no known token has no vector; similarity against it is 0.
    Lenient,
}

#[derive(Debug, Clone)]
pub struct EmbeddingStore {
    dim: usize,
    table: HashMap<String, Vec<f64>>,
    oov_policy: OovPolicy,
}

impl EmbeddingStore {
    /// An empty table of the given dimension.
    pub fn new(dim: usize, oov_policy: OovPolicy) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Argument("embedding dimension must be positive".into()));
        }
        Ok(EmbeddingStore {
            dim,
            table: HashMap::new(),
            oov_policy,
        })
    }

    /// Builds a store from in-memory vectors, normalizing each.
    pub fn from_vectors<I, S>(dim: usize, oov_policy: OovPolicy, entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, Vec<f64>)>,
        S: Into<String>,
    {
        let mut store = Self::new(dim, oov_policy)?;
        for (token, vector) in entries {
            store.insert(token.into(), vector)?;
        }
        Ok(store)
    }

    /// Adds or replaces an entry. The vector is normalized; a zero or
    /// wrongly sized vector is rejected.
    pub fn insert(&mut self, token: String, vector: Vec<f64>) -> Result<()> {
        if vector.len() != self.dim {
            return Err(Error::Argument(format!(
                "vector for {token:?} has {} components, expected {}",
                vector.len(),
                self.dim
            )));
        }
        let unit = normalize(vector).ok_or_else(|| {
            Error::Argument(format!("vector for {token:?} has zero or non-finite norm"))
        })?;
        self.table.insert(token.to_lowercase(), unit);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }

    pub fn oov_policy(&self) -> OovPolicy {
        self.oov_policy
    }

    pub fn with_policy(mut self, oov_policy: OovPolicy) -> Self {
        self.oov_policy = oov_policy;
        self
    }

    pub fn get(&self, token: &str) -> Option<&[f64]> {
        self.table.get(&token.to_lowercase()).map(Vec::as_slice)
    }

    /// Renormalized mean of the vectors of the phrase's known tokens.
    ///
    /// `Ok(None)` means no token was found under [`OovPolicy::Lenient`].
    pub fn phrase_vector(&self, phrase: &str) -> Result<Option<Vec<f64>>> {
        let mut sum = vec![0.0; self.dim];
        let mut found = 0usize;
        for word in phrase.split_whitespace() {
            if let Some(v) = self.get(word) {
                found += 1;
                sum.iter_mut().zip(v).for_each(|(s, x)| *s += x);
            }
        }
        let vector = if found == 1 {
            Some(sum)
        } else if found > 1 {
            normalize(sum)
        } else {
            None
        };
        match (vector, self.oov_policy) {
            (Some(v), _) => Ok(Some(v)),
            (None, OovPolicy::Lenient) => Ok(None),
            (None, OovPolicy::Strict) => Err(Error::OutOfVocabulary {
                phrase: phrase.to_string(),
            }),
        }
    }

    /// Cosine similarity of two phrases; 0 when either has no vector under
    /// the lenient policy.
    pub fn cos_sim(&self, x: &str, y: &str) -> Result<f64> {
        let (Some(a), Some(b)) = (self.phrase_vector(x)?, self.phrase_vector(y)?) else {
            return Ok(0.0);
        };
        Ok(dot(&a, &b).clamp(-1.0, 1.0))
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn normalize(mut v: Vec<f64>) -> Option<Vec<f64>> {
    let norm = dot(&v, &v).sqrt();
    if norm == 0.0 || !norm.is_finite() {
        return None;
    }
    v.iter_mut().for_each(|x| *x /= norm);
    Some(v)
}

/// Reads the embedding TSV format. Duplicate tokens keep the last entry.
pub fn load_embeddings<R: BufRead>(input: R, oov_policy: OovPolicy) -> Result<EmbeddingStore> {
    let mut lines = input.lines().enumerate();
    let dim = loop {
        let Some((i, line)) = lines.next() else {
            return Err(Error::EmbeddingLoad {
                line: 1,
                message: "missing `#dim` header".into(),
            });
        };
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let dim = line
            .trim()
            .strip_prefix("#dim")
            .and_then(|d| d.trim().parse::<usize>().ok())
            .filter(|&d| d > 0)
            .ok_or_else(|| Error::EmbeddingLoad {
                line: i + 1,
                message: format!("expected `#dim D` header, found {line:?}"),
            })?;
        break dim;
    };
    let mut store = EmbeddingStore::new(dim, oov_policy)?;
    for (i, line) in lines {
        let line = line?;
        let lineno = i + 1;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let err = |message: String| Error::EmbeddingLoad { line: lineno, message };
        let (token, values) = line
            .split_once('\t')
            .ok_or_else(|| err("expected token<TAB>values".into()))?;
        let vector = values
            .split_whitespace()
            .map(|v| v.parse::<f64>().map_err(|_| err(format!("bad number {v:?}"))))
            .collect::<Result<Vec<_>>>()?;
        if vector.len() != dim {
            return Err(err(format!(
                "dimension mismatch: expected {dim} values, found {}",
                vector.len()
            )));
        }
        let unit = normalize(vector).ok_or_else(|| err(format!("zero vector for {token:?}")))?;
        let key = token.to_lowercase();
        if store.table.insert(key, unit).is_some() {
            warn!("embeddings line {lineno}: duplicate token {token:?}, keeping the later entry");
        }
    }
    Ok(store)
}

pub fn load_embeddings_str(input: &str, oov_policy: OovPolicy) -> Result<EmbeddingStore> {
    load_embeddings(input.as_bytes(), oov_policy)
}
