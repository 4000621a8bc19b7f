//! Two-sided alternating trees grown by breadth-first exploration on the
//! non-reserved part of the graph.

use super::graph::ColoredGraph;
use std::collections::VecDeque;

const NO_PARENT: usize = usize::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

/// How subtrees are grown.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TreeMode {
    /// `l` epochs of depth `2h` with leaf selection `Delta >= zeta * h`.
    Weighted { h: usize, l: usize, zeta: f64, budget: usize },
    /// Plain exploration until the subtree holds `size` vertices.
    Unweighted { size: usize },
}

/// A vertex pair of a subtree. `blue_llr` is the llr of the blue edge to the
/// parent; `cum` sums `blue - red` over the pairs from this one up to the root,
/// root excluded.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TreeNode {
    pub pair: usize,
    pub parent: usize,
    pub depth: usize,
    pub blue_llr: f64,
    pub cum: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Subtree {
    pub side: Side,
    pub nodes: Vec<TreeNode>,
    /// Node indices of the selected leaf set (`L_k` or `R_k`).
    pub leaves: Vec<usize>,
    /// Pairs taken from the unexplored set, padding included.
    pub consumed: usize,
    pub terminated: bool,
}

impl Subtree {
    /// Vertex on this subtree's side: the left vertex of the pair for a left
    /// subtree, its partner for a right subtree.
    pub fn vertex(&self, node: usize, g: &ColoredGraph) -> usize {
        let p = self.nodes[node].pair;
        match self.side {
            Side::Left => p,
            Side::Right => g.partner(p),
        }
    }

    /// Pairs from `node` up to the root, both included.
    pub fn chain_to_root(&self, mut node: usize) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.nodes[node].depth + 1);
        loop {
            out.push(self.nodes[node].pair);
            let parent = self.nodes[node].parent;
            if parent == NO_PARENT {
                return out;
            }
            node = parent;
        }
    }

    pub fn leaf_vertices(&self, g: &ColoredGraph) -> Vec<usize> {
        self.leaves.iter().map(|&k| self.vertex(k, g)).collect()
    }
}

/// Two subtrees joined by the red edge of pair `root`.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoSidedTree {
    pub root: usize,
    pub left: Subtree,
    pub right: Subtree,
}

impl TwoSidedTree {
    /// Pair sequence of the alternating path from right leaf `right_node` to
    /// left leaf `left_node`; it starts and ends with a red edge.
    pub fn path_pairs(&self, right_node: usize, left_node: usize) -> Vec<usize> {
        let mut out = self.right.chain_to_root(right_node);
        let mut down = self.left.chain_to_root(left_node);
        down.pop();
        down.reverse();
        out.extend(down);
        out
    }

    /// Excess weight of `path_pairs(right_node, left_node)` from the stored sums.
    pub fn path_delta(&self, right_node: usize, left_node: usize, g: &ColoredGraph) -> f64 {
        self.right.nodes[right_node].cum + self.left.nodes[left_node].cum - g.red_llr(self.root)
    }
}

/// Unexplored pairs with smallest-index access.
#[derive(Debug, Clone)]
pub struct Unexplored {
    flags: Vec<bool>,
    count: usize,
    cursor: usize,
}

impl Unexplored {
    pub fn new(n: usize, reserved: &[usize]) -> Self {
        let mut flags = vec![true; n];
        for &v in reserved {
            flags[v] = false;
        }
        let count = flags.iter().filter(|&&f| f).count();
        Unexplored { flags, count, cursor: 0 }
    }

    pub fn len(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    pub fn contains(&self, p: usize) -> bool {
        self.flags[p]
    }

    fn remove(&mut self, p: usize) {
        debug_assert!(self.flags[p]);
        self.flags[p] = false;
        self.count -= 1;
    }

    fn take_smallest(&mut self) -> Option<usize> {
        while self.cursor < self.flags.len() && !self.flags[self.cursor] {
            self.cursor += 1;
        }
        let p = (self.cursor < self.flags.len()).then_some(self.cursor)?;
        self.remove(p);
        Some(p)
    }

    /// Removes the `k` smallest members.
    fn pad(&mut self, k: usize) -> usize {
        (0..k).take_while(|_| self.take_smallest().is_some()).count()
    }
}

/// Unexplored offspring pairs of `node`, with the llr of the connecting blue edge.
fn offspring(
    side: Side,
    node_pair: usize,
    g: &ColoredGraph,
    unexplored: &Unexplored,
) -> Vec<(usize, f64)> {
    match side {
        Side::Left => g
            .blue_from_left(node_pair)
            .map(|(j, v)| (g.partner_inv(j), v))
            .filter(|&(c, _)| unexplored.contains(c))
            .collect(),
        Side::Right => {
            g.blue_into_right(g.partner(node_pair)).filter(|&(c, _)| unexplored.contains(c)).collect()
        }
    }
}

fn push_child(nodes: &mut Vec<TreeNode>, parent: usize, pair: usize, blue_llr: f64, g: &ColoredGraph) -> usize {
    let cum = nodes[parent].cum + blue_llr - g.red_llr(pair);
    let depth = nodes[parent].depth + 1;
    nodes.push(TreeNode { pair, parent, depth, blue_llr, cum });
    nodes.len() - 1
}

fn root_node(pair: usize) -> TreeNode {
    TreeNode { pair, parent: NO_PARENT, depth: 0, blue_llr: 0.0, cum: 0.0 }
}

/// Epoch-wise exploration with leaf selection; stops once the subtree holds `budget` pairs.
fn grow_weighted(
    side: Side,
    root: usize,
    g: &ColoredGraph,
    unexplored: &mut Unexplored,
    (h, l, zeta, budget): (usize, usize, f64, usize),
) -> Subtree {
    let mut nodes = vec![root_node(root)];
    let mut frontier = vec![0usize];
    let mut terminated = false;
    let mut leaves = Vec::new();
    for epoch in 0..l {
        let mut selected = Vec::new();
        for &v in &frontier {
            let mut level = vec![v];
            let mut depth = 0;
            while depth < h && !level.is_empty() && !terminated {
                let mut next = Vec::new();
                'parents: for &x in &level {
                    for (c, llr) in offspring(side, nodes[x].pair, g, unexplored) {
                        if nodes.len() >= budget {
                            terminated = true;
                            break 'parents;
                        }
                        unexplored.remove(c);
                        next.push(push_child(&mut nodes, x, c, llr, g));
                    }
                }
                level = next;
                depth += 1;
            }
            if depth == h {
                let base = nodes[v].cum;
                selected.extend(level.into_iter().filter(|&u| nodes[u].cum - base >= zeta * h as f64));
            }
            if terminated {
                break;
            }
        }
        selected.sort_by_key(|&u| nodes[u].pair);
        if epoch + 1 == l {
            leaves = selected;
            break;
        }
        frontier = selected;
        if terminated || frontier.is_empty() {
            break;
        }
    }
    let used = nodes.len() - usize::from(side == Side::Right);
    Subtree { side, nodes, leaves, consumed: used, terminated }
}

/// Breadth-first exploration until the subtree holds `size` vertices; every vertex is a leaf.
fn grow_unweighted(side: Side, root: usize, g: &ColoredGraph, unexplored: &mut Unexplored, size: usize) -> Subtree {
    let mut nodes = vec![root_node(root)];
    let mut queue = VecDeque::from([0usize]);
    'outer: while let Some(x) = queue.pop_front() {
        for (c, llr) in offspring(side, nodes[x].pair, g, unexplored) {
            if nodes.len() >= size {
                break 'outer;
            }
            unexplored.remove(c);
            queue.push_back(push_child(&mut nodes, x, c, llr, g));
        }
        if nodes.len() >= size {
            break;
        }
    }
    let leaves = (0..nodes.len()).collect();
    let used = nodes.len() - usize::from(side == Side::Right);
    Subtree { side, nodes, leaves, consumed: used, terminated: false }
}

/// Output of `build_trees`.
#[derive(Debug, Clone, PartialEq)]
pub struct Forest {
    pub trees: Vec<TwoSidedTree>,
    /// Pairs per subtree (`m`), or the subtree size in the unweighted mode.
    pub budget: usize,
    /// Trees requested; fewer are built when the unexplored set runs out.
    pub planned: usize,
    pub exhausted: bool,
    pub unexplored_left: usize,
}

/// `m = ceil((1+eps)^{2HL} exp(3 H alpha + eps H))`, capped at `max(1, floor(gamma n / 2))`.
pub fn tree_budget(n: usize, gamma: f64, h: usize, l: usize, eps: f64, alpha: f64) -> usize {
    let (hf, lf) = (h as f64, l as f64);
    let log_m = 2.0 * hf * lf * (1.0 + eps).ln() + 3.0 * hf * alpha + eps * hf;
    let cap = ((gamma * n as f64 / 2.0).floor() as usize).max(1);
    if !log_m.is_finite() || log_m > (cap as f64).ln() {
        cap
    } else {
        (log_m.exp().ceil() as usize).clamp(1, cap)
    }
}

/// Builds the two-sided trees on the pairs outside `reserved`.
pub fn build_trees(g: &ColoredGraph, reserved: &[usize], gamma: f64, mode: TreeMode) -> Forest {
    let n = g.n();
    let mut unexplored = Unexplored::new(n, reserved);
    let mut trees = Vec::new();
    match mode {
        TreeMode::Weighted { h, l, zeta, budget } => {
            let m = budget.max(1);
            let planned = (gamma * n as f64 / (2.0 * m as f64)).floor() as usize;
            let mut exhausted = false;
            for _ in 0..planned {
                if unexplored.len() < 2 * m {
                    exhausted = true;
                    break;
                }
                let root = unexplored.take_smallest().expect("checked non-empty");
                let mut left = grow_weighted(Side::Left, root, g, &mut unexplored, (h, l, zeta, m));
                left.consumed += unexplored.pad(m - left.nodes.len());
                let mut right = grow_weighted(Side::Right, root, g, &mut unexplored, (h, l, zeta, m));
                right.consumed += unexplored.pad(m - right.nodes.len());
                trees.push(TwoSidedTree { root, left, right });
            }
            Forest { trees, budget: m, planned, exhausted, unexplored_left: unexplored.len() }
        }
        TreeMode::Unweighted { size } => {
            let size = size.max(1);
            let floor = ((1.0 - 2.0 * gamma).max(0.0) * n as f64).floor() as usize;
            while unexplored.len() > floor {
                let Some(root) = unexplored.take_smallest() else { break };
                let left = grow_unweighted(Side::Left, root, g, &mut unexplored, size);
                let right = grow_unweighted(Side::Right, root, g, &mut unexplored, size);
                trees.push(TwoSidedTree { root, left, right });
            }
            let planned = trees.len();
            Forest { trees, budget: size, planned, exhausted: false, unexplored_left: unexplored.len() }
        }
    }
}

impl Forest {
    /// Verifies that no pair is used twice and none is reserved.
    pub fn check_disjoint(&self, n: usize, reserved: &[usize]) -> Result<(), String> {
        let mut owner = vec![usize::MAX; n];
        for &v in reserved {
            owner[v] = usize::MAX - 1;
        }
        for (k, t) in self.trees.iter().enumerate() {
            for (side, sub) in [("left", &t.left), ("right", &t.right)] {
                let skip_root = usize::from(sub.side == Side::Right);
                for node in &sub.nodes[skip_root..] {
                    match owner[node.pair] {
                        usize::MAX => owner[node.pair] = k,
                        o if o == usize::MAX - 1 => {
                            return Err(format!("tree {k} ({side}) uses reserved pair {}", node.pair))
                        }
                        o => return Err(format!("pair {} used by trees {o} and {k}", node.pair)),
                    }
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::{llr, WeightDistribution};
    use crate::model::generate_sparse;
    use crate::rng::from_seed;

    fn weighted_graph(n: usize, d: f64, seed: u64) -> (ColoredGraph, WeightDistribution, WeightDistribution) {
        let p = WeightDistribution::exponential(1.5).unwrap();
        let q = WeightDistribution::exponential(1.0).unwrap();
        let inst = generate_sparse(n, d, &p, &q, seed).unwrap();
        (ColoredGraph::from_instance(&inst), p, q)
    }

    fn alternates(g: &ColoredGraph, pairs: &[usize]) -> bool {
        pairs.windows(2).all(|w| g.blue_llr(w[0], g.partner(w[1])).is_some())
    }

    #[test]
    fn weighted_trees_are_disjoint_and_padded() {
        let (g, _, _) = weighted_graph(4000, 3.0, 1);
        let reserved: Vec<usize> = (0..400).map(|k| 10 * k).collect();
        let forest = build_trees(&g, &reserved, 0.1, TreeMode::Weighted { h: 2, l: 2, zeta: 0.0, budget: 40 });
        assert_eq!(forest.planned, 5);
        assert_eq!(forest.trees.len(), 5);
        forest.check_disjoint(4000, &reserved).unwrap();
        for t in &forest.trees {
            assert_eq!(t.left.consumed, 40);
            assert_eq!(t.right.consumed, 39);
            assert!(t.left.nodes.len() <= 40 && t.right.nodes.len() <= 40);
            for &a in &t.left.leaves {
                assert_eq!(t.left.nodes[a].depth, 4);
            }
            for &a in &t.right.leaves {
                for &b in &t.left.leaves {
                    let path = t.path_pairs(a, b);
                    assert_eq!(path.len(), 9);
                    assert!(alternates(&g, &path));
                    let direct: f64 = path.windows(2).map(|w| g.blue_llr(w[0], g.partner(w[1])).unwrap()).sum::<f64>()
                        - path.iter().map(|&p| g.red_llr(p)).sum::<f64>();
                    assert!((direct - t.path_delta(a, b, &g)).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn vacuous_selection_keeps_all_depth_two_leaves() {
        let (g, _, _) = weighted_graph(3000, 2.5, 2);
        let forest =
            build_trees(&g, &[], 0.2, TreeMode::Weighted { h: 1, l: 1, zeta: f64::NEG_INFINITY, budget: 1000 });
        for t in &forest.trees {
            for sub in [&t.left, &t.right] {
                let depth_two = sub.nodes.iter().filter(|x| x.depth == 1).count();
                assert_eq!(sub.leaves.len(), depth_two);
            }
        }
    }

    #[test]
    fn selection_rate_matches_direct_simulation() {
        let (h, zeta) = (2usize, 0.05);
        let mut kept = 0usize;
        let mut total = 0usize;
        for seed in 0..4 {
            let (g, _, _) = weighted_graph(40_000, 3.0, 10 + seed);
            let forest = build_trees(&g, &[], 0.5, TreeMode::Weighted { h, l: 1, zeta, budget: 100 });
            for t in &forest.trees {
                for sub in [&t.left, &t.right] {
                    if sub.terminated {
                        continue;
                    }
                    total += sub.nodes.iter().filter(|x| x.depth == h).count();
                    kept += sub.leaves.len();
                }
            }
        }
        let observed = kept as f64 / total as f64;
        let p = WeightDistribution::exponential(1.5).unwrap();
        let q = WeightDistribution::exponential(1.0).unwrap();
        let mut rng = from_seed(99);
        let trials = 200_000;
        let hits = (0..trials)
            .filter(|_| {
                let s: f64 = (0..h).map(|_| llr(&p, &q, Some(q.sample(&mut rng))) - llr(&p, &q, Some(p.sample(&mut rng)))).sum();
                s >= zeta * h as f64
            })
            .count();
        let expected = hits as f64 / trials as f64;
        let sigma = (expected * (1.0 - expected) / total as f64).sqrt() + (expected * (1.0 - expected) / trials as f64).sqrt();
        assert!(total > 2000, "too few leaves: {total}");
        assert!((observed - expected).abs() <= 3.0 * sigma, "observed {observed}, expected {expected}, sigma {sigma}");
    }

    #[test]
    fn unweighted_trees_stop_at_size() {
        let inst = crate::model::generate_unweighted(5000, 4.0, 3).unwrap();
        let g = ColoredGraph::from_instance(&inst);
        let reserved: Vec<usize> = (2500..5000).collect();
        let forest = build_trees(&g, &reserved, 0.5, TreeMode::Unweighted { size: 20 });
        forest.check_disjoint(5000, &reserved).unwrap();
        assert!(forest.trees.len() > 50);
        let full = forest.trees.iter().filter(|t| t.left.leaves.len() == 20 && t.right.leaves.len() == 20).count();
        assert!(full >= 10, "{full} full trees");
        for t in &forest.trees {
            assert!(t.left.nodes.len() <= 20 && t.right.nodes.len() <= 20);
            for &a in &t.right.leaves {
                let path = t.path_pairs(a, t.left.leaves[t.left.leaves.len() - 1]);
                assert!(alternates(&g, &path));
            }
        }
    }

    #[test]
    fn budget_formula_is_capped() {
        assert_eq!(tree_budget(1000, 0.1, 4, 8, 0.3, 0.1), 50);
        let m = tree_budget(1_000_000_000, 0.1, 1, 1, 0.1, 0.0);
        assert_eq!(m, ((1.1f64).powi(2) * (0.1f64).exp()).ceil() as usize);
    }
}
