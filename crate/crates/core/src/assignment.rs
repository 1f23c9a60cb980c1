//! Rectangular linear assignment.
//!
//! [`solve_assignment`] returns a matching of size `min(rows, cols)` that is
//! optimal for the requested [`Objective`]. Among optimal matchings it returns
//! the lexicographically smallest sequence of `(row, col)` pairs, so results
//! do not depend on solver internals.
//!
//! The core solver is the shortest-augmenting-path form of the Hungarian
//! method with row/column potentials, `O(n^2 m)` for `n <= m`. Tie-breaking
//! fixes pairs greedily in lexicographic order and re-solves the remainder to
//! check that the optimum is still reachable.

use std::fmt;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Objective {
    #[default]
    Maximize,
    Minimize,
}

impl fmt::Display for Objective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Objective::Maximize => "max",
            Objective::Minimize => "min",
        })
    }
}

/// Dense row-major matrix of finite reals.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<f64>,
}

impl CostMatrix {
    pub fn new(rows: usize, cols: usize, entries: Vec<f64>) -> Result<Self> {
        if entries.len() != rows * cols {
            return Err(Error::Argument(format!(
                "{rows}x{cols} matrix needs {} entries, got {}",
                rows * cols,
                entries.len()
            )));
        }
        if let Some(bad) = entries.iter().find(|x| !x.is_finite()) {
            return Err(Error::Argument(format!("non-finite matrix entry {bad}")));
        }
        Ok(CostMatrix { rows, cols, entries })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::Argument("ragged matrix rows".into()));
        }
        Self::new(rows.len(), cols, rows.concat())
    }

    pub fn empty(rows: usize, cols: usize) -> Self {
        debug_assert!(rows == 0 || cols == 0);
        CostMatrix {
            rows,
            cols,
            entries: Vec::new(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.rows == 0 || self.cols == 0
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.entries[row * self.cols + col]
    }

    /// Sum of the entries at `pairs`, accumulated in the order given.
    pub fn total(&self, pairs: &[(usize, usize)]) -> f64 {
        pairs.iter().map(|&(r, c)| self.get(r, c)).sum()
    }
}

/// Optimal matching of size `min(rows, cols)`, pairs sorted by row.
pub fn solve_assignment(matrix: &CostMatrix, objective: Objective) -> Vec<(usize, usize)> {
    if matrix.is_empty() {
        return Vec::new();
    }
    let sign = match objective {
        Objective::Maximize => -1.0,
        Objective::Minimize => 1.0,
    };
    // everything below minimizes `cost`
    let cost = |r: usize, c: usize| sign * matrix.get(r, c);
    let all_rows: Vec<usize> = (0..matrix.rows).collect();
    let all_cols: Vec<usize> = (0..matrix.cols).collect();
    let target = matrix.rows.min(matrix.cols);

    let best_pairs = hungarian_subset(&cost, &all_rows, &all_cols);
    let best = total_cost(&cost, &best_pairs);
    let tol = 1e-9 * (1.0 + best.abs());

    let mut fixed: Vec<(usize, usize)> = Vec::with_capacity(target);
    let mut col_used = vec![false; matrix.cols];
    for r in 0..matrix.rows {
        if fixed.len() == target {
            break;
        }
        let rest_rows: Vec<usize> = (r + 1..matrix.rows).collect();
        let needed_after = target - fixed.len() - 1;
        let mut chosen = None;
        for c in 0..matrix.cols {
            if col_used[c] {
                continue;
            }
            let rest_cols: Vec<usize> = (0..matrix.cols).filter(|&k| !col_used[k] && k != c).collect();
            if rest_rows.len().min(rest_cols.len()) != needed_after {
                continue;
            }
            let mut candidate = fixed.clone();
            candidate.push((r, c));
            candidate.extend(hungarian_subset(&cost, &rest_rows, &rest_cols));
            candidate.sort_unstable();
            if total_cost(&cost, &candidate) <= best + tol {
                chosen = Some(c);
                break;
            }
        }
        if let Some(c) = chosen {
            fixed.push((r, c));
            col_used[c] = true;
        }
        // otherwise row r stays unmatched (only possible when rows > cols)
    }
    debug_assert_eq!(fixed.len(), target);
    fixed
}

fn total_cost(cost: &impl Fn(usize, usize) -> f64, pairs: &[(usize, usize)]) -> f64 {
    pairs.iter().map(|&(r, c)| cost(r, c)).sum()
}

/// Minimum-cost matching of size `min(|rows|, |cols|)` over the given subsets.
fn hungarian_subset(cost: &impl Fn(usize, usize) -> f64, rows: &[usize], cols: &[usize]) -> Vec<(usize, usize)> {
    if rows.is_empty() || cols.is_empty() {
        return Vec::new();
    }
    if rows.len() <= cols.len() {
        hungarian(rows.len(), cols.len(), |i, j| cost(rows[i], cols[j]))
            .into_iter()
            .map(|(i, j)| (rows[i], cols[j]))
            .collect()
    } else {
        hungarian(cols.len(), rows.len(), |i, j| cost(rows[j], cols[i]))
            .into_iter()
            .map(|(i, j)| (rows[j], cols[i]))
            .collect()
    }
}

/// Hungarian method for `n <= m`: every row is matched to a distinct column
/// minimizing total cost. Returns `(row, col)` pairs.
fn hungarian(n: usize, m: usize, a: impl Fn(usize, usize) -> f64) -> Vec<(usize, usize)> {
    debug_assert!(n <= m);
    // 1-based with a sentinel column 0
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; m + 1];
    let mut p = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=m {
                if used[j] {
                    continue;
                }
                let cur = a(i0 - 1, j - 1) - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut pairs: Vec<(usize, usize)> = (1..=m)
        .filter(|&j| p[j] != 0)
        .map(|j| (p[j] - 1, j - 1))
        .collect();
    pairs.sort_unstable();
    pairs
}
