//! Perfect matchings, the log-likelihood-ratio graph and exact estimators.

use crate::dist::llr;
use crate::lap::{self, Assignment};
use crate::model::{ModelDescriptor, ObservedGraph, PlantedInstance};
use std::fmt;
use thiserror::Error;

/// Candidate edges kept per row and column by the dense solver before dual verification.
const DENSE_KEEP: usize = 8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MatchError {
    #[error("not a permutation of 0..{0}")]
    NotAPermutation(usize),
    #[error("no perfect matching with finite likelihood exists")]
    Infeasible,
    #[error("size mismatch: {0} vs {1}")]
    SizeMismatch(usize, usize),
    #[error("edge ({0},{1}) has unbounded likelihood ratio")]
    Unbounded(usize, usize),
}

/// A perfect matching stored as the partner of each left vertex.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Matching(Vec<usize>);

impl Matching {
    pub fn new(perm: Vec<usize>) -> Result<Self, MatchError> {
        let n = perm.len();
        let mut seen = vec![false; n];
        for &j in &perm {
            if j >= n || seen[j] {
                return Err(MatchError::NotAPermutation(n));
            }
            seen[j] = true;
        }
        Ok(Matching(perm))
    }

    pub fn identity(n: usize) -> Self {
        Matching((0..n).collect())
    }

    pub fn n(&self) -> usize {
        self.0.len()
    }

    pub fn partner(&self, i: usize) -> usize {
        self.0[i]
    }

    pub fn perm(&self) -> &[usize] {
        &self.0
    }

    pub fn inverse(&self) -> Matching {
        let mut inv = vec![0; self.0.len()];
        for (i, &j) in self.0.iter().enumerate() {
            inv[j] = i;
        }
        Matching(inv)
    }

    pub fn into_vec(self) -> Vec<usize> {
        self.0
    }
}

impl fmt::Display for Matching {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|j| j.to_string()).collect();
        write!(f, "{}", parts.join(" "))
    }
}

/// Per-edge log-likelihood ratios. Only finite entries are stored; absent
/// pairs are `-inf`.
#[derive(Debug, Clone, PartialEq)]
pub struct LlrGraph {
    n: usize,
    rows: Vec<Vec<(usize, f64)>>,
    unbounded: Option<(usize, usize)>,
}

impl LlrGraph {
    /// Builds from a row-major matrix; `-inf` entries are absent.
    pub fn from_matrix(n: usize, values: &[f64]) -> Self {
        assert_eq!(values.len(), n * n);
        let mut unbounded = None;
        let rows = (0..n)
            .map(|i| {
                (0..n)
                    .filter_map(|j| {
                        let v = values[i * n + j];
                        if v == f64::INFINITY && unbounded.is_none() {
                            unbounded = Some((i, j));
                        }
                        v.is_finite().then_some((j, v))
                    })
                    .collect()
            })
            .collect();
        LlrGraph { n, rows, unbounded }
    }

    /// Log-likelihood ratios of the observable graph under its model.
    pub fn from_graph(g: &ObservedGraph) -> Self {
        let n = g.n;
        let p = g.model.planted_law();
        let q = g.model.unplanted_law(n);
        let mut unbounded = None;
        let rows = (0..n)
            .map(|i| {
                g.row(i)
                    .into_iter()
                    .filter_map(|(j, w)| {
                        let v = match g.model {
                            ModelDescriptor::Exponential { lambda } => {
                                (n as f64 * lambda).ln() - (lambda - 1.0 / n as f64) * w
                            }
                            ModelDescriptor::Unweighted => 0.0,
                            _ => llr(&p, &q, Some(w)),
                        };
                        if v == f64::INFINITY && unbounded.is_none() {
                            unbounded = Some((i, j));
                        }
                        v.is_finite().then_some((j, v))
                    })
                    .collect()
            })
            .collect();
        LlrGraph { n, rows, unbounded }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn row(&self, i: usize) -> &[(usize, f64)] {
        &self.rows[i]
    }

    /// Value at `(i, j)`; `-inf` when absent.
    pub fn value(&self, i: usize, j: usize) -> f64 {
        let r = &self.rows[i];
        match r.binary_search_by_key(&j, |e| e.0) {
            Ok(k) => r[k].1,
            Err(_) => {
                if self.unbounded == Some((i, j)) {
                    f64::INFINITY
                } else {
                    f64::NEG_INFINITY
                }
            }
        }
    }

    pub fn edge_count(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }
}

pub fn build_llr(inst: &PlantedInstance) -> LlrGraph {
    LlrGraph::from_graph(&inst.graph)
}

/// `sum_i llr(i, m(i))`.
pub fn objective(llr: &LlrGraph, m: &Matching) -> f64 {
    (0..m.n()).map(|i| llr.value(i, m.partner(i))).sum()
}

/// Exact minimum-cost perfect matching over the given finite cost rows, with
/// ties among optimal matchings broken toward the lexicographically smallest
/// permutation.
pub fn min_cost_lex(n: usize, rows: &[Vec<(usize, f64)>]) -> Result<Matching, MatchError> {
    let edges: usize = rows.iter().map(Vec::len).sum();
    let sol: Assignment = if edges > n * n / 4 && n > 2 * DENSE_KEEP {
        let lookup = |i: usize, j: usize| -> Option<f64> {
            let r = &rows[i];
            if r.len() == n {
                return Some(r[j].1);
            }
            r.binary_search_by_key(&j, |e| e.0).ok().map(|k| r[k].1)
        };
        lap::solve_dense(n, &lookup, DENSE_KEEP).ok_or(MatchError::Infeasible)?
    } else {
        lap::solve_sparse(n, rows).ok_or(MatchError::Infeasible)?
    };
    let tight: Vec<Vec<usize>> = rows
        .iter()
        .enumerate()
        .map(|(i, r)| {
            r.iter()
                .filter(|&&(j, c)| sol.reduced_cost(i, j, c) <= 1e-9 * (1.0 + c.abs()))
                .map(|&(j, _)| j)
                .collect()
        })
        .collect();
    let lex = lap::lexicographic_min(n, &tight, &sol.row_to_col);
    let cost_of = |perm: &[usize]| -> f64 {
        perm.iter()
            .enumerate()
            .map(|(i, &j)| {
                let r = &rows[i];
                r[r.binary_search_by_key(&j, |e| e.0).expect("matched edge present")].1
            })
            .sum()
    };
    let base = cost_of(&sol.row_to_col);
    let alt = cost_of(&lex);
    let chosen = if alt <= base + 1e-12 * (1.0 + base.abs()) { lex } else { sol.row_to_col };
    Ok(Matching(chosen))
}

/// Maximum-likelihood matching: argmax of the total llr, lexicographic ties.
pub fn mle(llr: &LlrGraph) -> Result<Matching, MatchError> {
    if let Some((i, j)) = llr.unbounded {
        return Err(MatchError::Unbounded(i, j));
    }
    let rows: Vec<Vec<(usize, f64)>> = llr.rows.iter().map(|r| r.iter().map(|&(j, v)| (j, -v)).collect()).collect();
    min_cost_lex(llr.n, &rows)
}

/// Minimum total raw weight perfect matching on the observable graph.
pub fn min_weight_matching(inst: &PlantedInstance) -> Result<Matching, MatchError> {
    min_cost_lex(inst.graph.n, &inst.graph.rows())
}

/// `|M xor M'| / n`.
pub fn reconstruction_error(estimate: &Matching, truth: &Matching) -> Result<f64, MatchError> {
    if estimate.n() != truth.n() {
        return Err(MatchError::SizeMismatch(estimate.n(), truth.n()));
    }
    let n = truth.n();
    let wrong = (0..n).filter(|&i| estimate.partner(i) != truth.partner(i)).count();
    Ok(2.0 * wrong as f64 / n as f64)
}

/// Result of the greedy thresholding baseline.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdResult {
    pub matching: Matching,
    /// Rows that were completed arbitrarily after the greedy phase.
    pub completed: usize,
}

/// Baseline: each left vertex proposes its lightest edge; proposals are
/// accepted in increasing weight; leftovers take their lightest free edge,
/// then any free column.
pub fn threshold_estimator(inst: &PlantedInstance) -> ThresholdResult {
    let g = &inst.graph;
    let n = g.n;
    let rows = g.rows();
    let mut proposals: Vec<(f64, usize, usize)> = rows
        .iter()
        .enumerate()
        .filter_map(|(i, r)| r.iter().min_by(|a, b| a.1.total_cmp(&b.1)).map(|&(j, w)| (w, i, j)))
        .collect();
    proposals.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut row_to_col = vec![usize::MAX; n];
    let mut taken = vec![false; n];
    for (_, i, j) in proposals {
        if !taken[j] {
            taken[j] = true;
            row_to_col[i] = j;
        }
    }
    let mut completed = 0;
    for i in 0..n {
        if row_to_col[i] != usize::MAX {
            continue;
        }
        let best = rows[i].iter().filter(|e| !taken[e.0]).min_by(|a, b| a.1.total_cmp(&b.1)).map(|e| e.0);
        let j = best.unwrap_or_else(|| {
            completed += 1;
            (0..n).find(|&j| !taken[j]).expect("a free column remains")
        });
        taken[j] = true;
        row_to_col[i] = j;
    }
    ThresholdResult { matching: Matching(row_to_col), completed }
}
