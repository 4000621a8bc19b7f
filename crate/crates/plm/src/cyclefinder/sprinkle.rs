//! Sprinkling: reserved pairs become hubs attached to tree leaves, and hub
//! connections define the blue edges of the super graph.

use super::graph::ColoredGraph;
use super::trees::TwoSidedTree;
use std::collections::BTreeMap;

/// Thresholds and nominal parameters of the sprinkling step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SprinkleParams {
    pub tau_red: f64,
    pub tau_blue: f64,
    /// Nominal lower bound on leaf-set sizes.
    pub s: f64,
    /// Mean number of thresholded blue neighbours per vertex.
    pub eta: f64,
}

/// Realized quantities of a sprinkling run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SprinkleStats {
    pub k1: usize,
    pub k2: usize,
    pub v_star: usize,
    pub beta: f64,
    pub b: f64,
    pub kappa: f64,
    pub eta: f64,
    pub d_super: f64,
    pub overlap: usize,
    /// Mean blue degree of the super graph.
    pub realized_degree: f64,
}

/// A hub pair together with the tree leaf that witnesses its blue edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Hub {
    pub pair: usize,
    pub leaf: usize,
}

/// Super graph on the surviving trees. Super vertex `a` stands for tree
/// `members[a]`; a blue edge `a -> b` joins `U_a` and `V_b'`.
#[derive(Debug, Clone, PartialEq)]
pub struct SuperGraph {
    pub members: Vec<usize>,
    pub adj: Vec<Vec<usize>>,
    /// `U_k`: pairs whose right vertex is attached to a left leaf of the tree.
    pub hubs_u: Vec<Vec<Hub>>,
    /// `V_k`: pairs whose left vertex is attached to a right leaf of the tree.
    pub hubs_v: Vec<Vec<Hub>>,
    witness: BTreeMap<(usize, usize), (usize, usize)>,
    pub stats: SprinkleStats,
}

impl SuperGraph {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Pairs `(u, v)` with `u` in `U_a`, `v` in `V_b` and a blue edge `(u, partner(v))`.
    pub fn witness(&self, a: usize, b: usize) -> Option<(usize, usize)> {
        self.witness.get(&(a, b)).copied()
    }

    pub fn edge_count(&self) -> usize {
        self.adj.iter().map(Vec::len).sum()
    }
}

/// Runs the sprinkling step on the trees listed in `k1` (indices into `trees`).
pub fn sprinkle(
    g: &ColoredGraph,
    trees: &[TwoSidedTree],
    k1: &[usize],
    reserved: &[usize],
    params: SprinkleParams,
) -> SuperGraph {
    let n = g.n();
    let mut in_star = vec![false; n];
    let mut v_star = 0usize;
    for &v in reserved {
        if g.red_llr(v) <= params.tau_red && !in_star[v] {
            in_star[v] = true;
            v_star += 1;
        }
    }
    let tau = params.tau_blue;
    // A_k': reserved right vertices blue-adjacent to a left leaf; B_k: reserved
    // left vertices blue-adjacent to a right leaf. Stored as pairs with witnesses.
    let mut a_sets: Vec<BTreeMap<usize, usize>> = Vec::with_capacity(k1.len());
    let mut b_sets: Vec<BTreeMap<usize, usize>> = Vec::with_capacity(k1.len());
    for &k in k1 {
        let t = &trees[k];
        let mut a = BTreeMap::new();
        for &leaf in &t.left.leaves {
            let u = t.left.vertex(leaf, g);
            for (j, v) in g.blue_from_left(u) {
                let p = g.partner_inv(j);
                if v >= tau && in_star[p] {
                    a.entry(p).or_insert(leaf);
                }
            }
        }
        let mut b = BTreeMap::new();
        for &leaf in &t.right.leaves {
            let x = t.right.vertex(leaf, g);
            for (i, v) in g.blue_into_right(x) {
                if v >= tau && in_star[i] {
                    b.entry(i).or_insert(leaf);
                }
            }
        }
        a_sets.push(a);
        b_sets.push(b);
    }
    let mut hits = vec![0u32; n];
    for set in a_sets.iter().chain(b_sets.iter()) {
        for &p in set.keys() {
            hits[p] += 1;
        }
    }
    let overlap = hits.iter().filter(|&&c| c >= 2).count();
    let beta = v_star as f64 / n as f64;
    let b = (beta * params.s * params.eta / 4.0).max(1.0);
    let mut members = Vec::new();
    let mut hubs_u = Vec::new();
    let mut hubs_v = Vec::new();
    for (idx, &k) in k1.iter().enumerate() {
        let keep = |set: &BTreeMap<usize, usize>| -> Vec<Hub> {
            set.iter().filter(|(&p, _)| hits[p] == 1).map(|(&pair, &leaf)| Hub { pair, leaf }).collect()
        };
        let u = keep(&a_sets[idx]);
        let v = keep(&b_sets[idx]);
        if u.len() as f64 >= b && v.len() as f64 >= b {
            members.push(k);
            hubs_u.push(u);
            hubs_v.push(v);
        }
    }
    let k2 = members.len();
    let mut owner_u = vec![usize::MAX; n];
    let mut owner_v = vec![usize::MAX; n];
    for a in 0..k2 {
        for h in &hubs_u[a] {
            owner_u[h.pair] = a;
        }
        for h in &hubs_v[a] {
            owner_v[h.pair] = a;
        }
    }
    let mut witness = BTreeMap::new();
    for a in 0..k2 {
        for h in &hubs_u[a] {
            for (j, v) in g.blue_from_left(h.pair) {
                if v < tau {
                    continue;
                }
                let target = g.partner_inv(j);
                let b_idx = owner_v[target];
                if b_idx != usize::MAX && b_idx != a {
                    witness.entry((a, b_idx)).or_insert((h.pair, target));
                }
            }
        }
    }
    let mut adj = vec![Vec::new(); k2];
    for &(a, b_idx) in witness.keys() {
        adj[a].push(b_idx);
    }
    let k1_len = k1.len();
    let stats = SprinkleStats {
        k1: k1_len,
        k2,
        v_star,
        beta,
        b,
        kappa: 2.0 * k1_len as f64 * params.s * params.eta / n as f64,
        eta: params.eta,
        d_super: k1_len as f64 * b * b * params.eta / (32.0 * n as f64),
        overlap,
        realized_degree: if k2 == 0 { 0.0 } else { witness.len() as f64 / k2 as f64 },
    };
    SuperGraph { members, adj, hubs_u, hubs_v, witness, stats }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cyclefinder::trees::{build_trees, TreeMode};
    use crate::model::generate_unweighted;

    fn setup() -> (ColoredGraph, Vec<usize>, Vec<TwoSidedTree>, Vec<usize>) {
        let inst = generate_unweighted(20_000, 4.0, 8).unwrap();
        let g = ColoredGraph::from_instance(&inst);
        let reserved: Vec<usize> = (0..20_000).filter(|v| v % 2 == 1).collect();
        let forest = build_trees(&g, &reserved, 0.5, TreeMode::Unweighted { size: 20 });
        let k1: Vec<usize> = (0..forest.trees.len())
            .filter(|&k| forest.trees[k].left.leaves.len() == 20 && forest.trees[k].right.leaves.len() == 20)
            .take(60)
            .collect();
        (g, reserved, forest.trees, k1)
    }

    #[test]
    fn hubs_are_disjoint_and_witnessed() {
        let (g, reserved, trees, k1) = setup();
        let sg = sprinkle(&g, &trees, &k1, &reserved, SprinkleParams { tau_red: 0.0, tau_blue: 0.0, s: 20.0, eta: 4.0 });
        assert!(sg.len() > 10, "K2 = {}", sg.len());
        let mut seen = std::collections::HashSet::new();
        for a in 0..sg.len() {
            let t = &trees[sg.members[a]];
            assert!(sg.hubs_u[a].len() as f64 >= sg.stats.b);
            for h in &sg.hubs_u[a] {
                assert!(seen.insert(h.pair), "hub {} reused", h.pair);
                assert!(g.blue_llr(t.left.vertex(h.leaf, &g), g.partner(h.pair)).is_some());
            }
            for h in &sg.hubs_v[a] {
                assert!(seen.insert(h.pair), "hub {} reused", h.pair);
                assert!(g.blue_llr(h.pair, t.right.vertex(h.leaf, &g)).is_some());
            }
            for &b in &sg.adj[a] {
                let (u, v) = sg.witness(a, b).unwrap();
                assert!(sg.hubs_u[a].iter().any(|h| h.pair == u));
                assert!(sg.hubs_v[b].iter().any(|h| h.pair == v));
                assert!(g.blue_llr(u, g.partner(v)).is_some());
            }
        }
        assert!(sg.stats.realized_degree > 1.0, "{:?}", sg.stats);
    }

    #[test]
    fn no_blue_edges_pass_threshold() {
        let (g, reserved, trees, k1) = setup();
        let sg = sprinkle(&g, &trees, &k1, &reserved, SprinkleParams { tau_red: 0.0, tau_blue: 1.0, s: 20.0, eta: 4.0 });
        assert!(sg.is_empty());
        assert_eq!(sg.stats.k1, k1.len());
        assert_eq!(sg.edge_count(), 0);
    }
}
