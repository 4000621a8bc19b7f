//! Bicolored view of a planted instance: red edges are the planted matching,
//! blue edges are every other observed pair, each carrying its llr.

use crate::dist::llr;
use crate::model::{ModelDescriptor, PlantedInstance};

/// Compressed adjacency with per-edge llr values.
#[derive(Debug, Clone, Default)]
struct Csr {
    offsets: Vec<usize>,
    targets: Vec<usize>,
    values: Vec<f64>,
}

impl Csr {
    fn build(n: usize, mut edges: Vec<(usize, usize, f64)>) -> Self {
        edges.sort_by_key(|a| (a.0, a.1));
        let mut offsets = vec![0usize; n + 1];
        for &(s, _, _) in &edges {
            offsets[s + 1] += 1;
        }
        for k in 0..n {
            offsets[k + 1] += offsets[k];
        }
        let targets = edges.iter().map(|e| e.1).collect();
        let values = edges.iter().map(|e| e.2).collect();
        Csr { offsets, targets, values }
    }

    fn neighbors(&self, s: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let (a, b) = (self.offsets[s], self.offsets[s + 1]);
        self.targets[a..b].iter().copied().zip(self.values[a..b].iter().copied())
    }

    fn degree(&self, s: usize) -> usize {
        self.offsets[s + 1] - self.offsets[s]
    }

    fn get(&self, s: usize, t: usize) -> Option<f64> {
        let (a, b) = (self.offsets[s], self.offsets[s + 1]);
        self.targets[a..b].binary_search(&t).ok().map(|k| self.values[a + k])
    }
}

/// Red/blue bipartite graph on `[n] x [n]'`. Pairs are named by their left vertex.
#[derive(Debug, Clone)]
pub struct ColoredGraph {
    n: usize,
    partner: Vec<usize>,
    partner_inv: Vec<usize>,
    red_llr: Vec<f64>,
    left: Csr,
    right: Csr,
}

impl ColoredGraph {
    /// `partner[i]` is the red neighbour of left `i`; `blue` lists `(i, j, llr)`
    /// with `j != partner[i]`.
    pub fn from_parts(partner: Vec<usize>, red_llr: Vec<f64>, blue: Vec<(usize, usize, f64)>) -> Self {
        let n = partner.len();
        assert_eq!(red_llr.len(), n);
        let mut partner_inv = vec![usize::MAX; n];
        for (i, &j) in partner.iter().enumerate() {
            assert!(j < n && partner_inv[j] == usize::MAX, "red edges must form a perfect matching");
            partner_inv[j] = i;
        }
        for &(i, j, _) in &blue {
            assert!(i < n && j < n && partner[i] != j, "blue edge ({i},{j}) invalid");
        }
        let reversed = blue.iter().map(|&(i, j, v)| (j, i, v)).collect();
        ColoredGraph { n, partner, partner_inv, red_llr, left: Csr::build(n, blue), right: Csr::build(n, reversed) }
    }

    /// Identity red matching with zero llr everywhere.
    pub fn unweighted(n: usize, blue: &[(usize, usize)]) -> Self {
        let blue = blue.iter().map(|&(i, j)| (i, j, 0.0)).collect();
        ColoredGraph::from_parts((0..n).collect(), vec![0.0; n], blue)
    }

    pub fn from_instance(inst: &PlantedInstance) -> Self {
        let g = &inst.graph;
        let n = g.n;
        let p = g.model.planted_law();
        let q = g.model.unplanted_law(n);
        let value = |w: f64| match g.model {
            ModelDescriptor::Exponential { lambda } => (n as f64 * lambda).ln() - (lambda - 1.0 / n as f64) * w,
            ModelDescriptor::Unweighted => 0.0,
            _ => llr(&p, &q, Some(w)),
        };
        let partner = inst.planted.perm().to_vec();
        let mut red_llr = vec![f64::NEG_INFINITY; n];
        let mut blue = Vec::with_capacity(g.edge_count().saturating_sub(n));
        for i in 0..n {
            for (j, w) in g.row(i) {
                if j == partner[i] {
                    red_llr[i] = value(w);
                } else {
                    blue.push((i, j, value(w)));
                }
            }
        }
        ColoredGraph::from_parts(partner, red_llr, blue)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Right end of the red edge at left `i`.
    pub fn partner(&self, i: usize) -> usize {
        self.partner[i]
    }

    /// Left end of the red edge at right `j`.
    pub fn partner_inv(&self, j: usize) -> usize {
        self.partner_inv[j]
    }

    pub fn partners(&self) -> &[usize] {
        &self.partner
    }

    pub fn red_llr(&self, i: usize) -> f64 {
        self.red_llr[i]
    }

    /// Blue edges `(j, llr)` at left `i`, increasing `j`.
    pub fn blue_from_left(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.left.neighbors(i)
    }

    /// Blue edges `(i, llr)` at right `j`, increasing `i`.
    pub fn blue_into_right(&self, j: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.right.neighbors(j)
    }

    pub fn blue_degree(&self, i: usize) -> usize {
        self.left.degree(i)
    }

    pub fn blue_llr(&self, i: usize, j: usize) -> Option<f64> {
        self.left.get(i, j)
    }

    /// Blue adjacency in pair coordinates: `k` in `out[i]` iff `(i, partner(k))` is blue.
    pub fn pair_adjacency(&self) -> Vec<Vec<usize>> {
        (0..self.n)
            .map(|i| {
                let mut v: Vec<usize> = self.left.neighbors(i).map(|(j, _)| self.partner_inv[j]).collect();
                v.sort_unstable();
                v
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::generate_sparse;
    use crate::dist::WeightDistribution;

    #[test]
    fn instance_view_splits_colors() {
        let p = WeightDistribution::exponential(2.0).unwrap();
        let q = WeightDistribution::exponential(1.0).unwrap();
        let inst = generate_sparse(200, 3.0, &p, &q, 5).unwrap();
        let g = ColoredGraph::from_instance(&inst);
        let blue: usize = (0..200).map(|i| g.blue_degree(i)).sum();
        assert_eq!(blue + 200, inst.graph.edge_count());
        for i in 0..200 {
            let j = g.partner(i);
            assert_eq!(g.partner_inv(j), i);
            assert!(g.red_llr(i).is_finite());
            assert!(g.blue_llr(i, j).is_none());
            for (j, v) in g.blue_from_left(i) {
                assert_eq!(g.blue_llr(i, j), Some(v));
                assert!(g.blue_into_right(j).any(|(a, w)| a == i && w == v));
            }
        }
    }
}
