//! Long alternating cycles by depth-first search on a bicoloured graph whose
//! red edges are `(i, i')`.

use super::cycle::{canonical_key, Vertex};
use crate::rng::PlmRng;
use rand::seq::index::sample;
use rand::SeedableRng;
use std::collections::HashSet;

const OUTSIDE: u8 = 0;
const UNEXPLORED: u8 = 1;
const ON_PATH: u8 = 2;
const DEAD: u8 = 3;

/// Closure window: `factor * |V| / 16` path positions at each end.
fn window(size: usize, factor: f64) -> usize {
    ((factor * size as f64 / 16.0).ceil() as usize).max(1)
}

/// Runs the alternating DFS restricted to `subset` until the dead and
/// unexplored sets have equal size, then closes the path with a blue edge
/// from one of its last `w` vertices to one of its first `w`. `adj[i]` lists
/// the `j` with a blue edge `(i, j')`. The result is a pair sequence with blue
/// edges `(c_a, c_{a+1}')` and the closing edge `(c_last, c_0')`.
pub fn dfs_long_cycle(adj: &[Vec<usize>], subset: &[usize], window_factor: f64) -> Option<Vec<usize>> {
    let mut order: Vec<usize> = subset.to_vec();
    order.sort_unstable();
    order.dedup();
    if order.len() < 2 {
        return None;
    }
    let mut state = vec![OUTSIDE; adj.len()];
    for &v in &order {
        state[v] = UNEXPLORED;
    }
    let mut ptr = vec![0usize; adj.len()];
    let mut path: Vec<usize> = Vec::with_capacity(order.len());
    let mut start_cursor = 0usize;
    let mut unexplored = order.len();
    let mut dead = 0usize;
    let mut take_start = |state: &mut Vec<u8>, path: &mut Vec<usize>, unexplored: &mut usize| {
        while state[order[start_cursor]] != UNEXPLORED {
            start_cursor += 1;
        }
        let v = order[start_cursor];
        state[v] = ON_PATH;
        path.push(v);
        *unexplored -= 1;
    };
    take_start(&mut state, &mut path, &mut unexplored);
    while unexplored != dead {
        match path.last().copied() {
            None => take_start(&mut state, &mut path, &mut unexplored),
            Some(top) => {
                let nbrs = &adj[top];
                while ptr[top] < nbrs.len() && state[nbrs[ptr[top]]] != UNEXPLORED {
                    ptr[top] += 1;
                }
                if ptr[top] < nbrs.len() {
                    let u = nbrs[ptr[top]];
                    state[u] = ON_PATH;
                    path.push(u);
                    unexplored -= 1;
                } else {
                    path.pop();
                    state[top] = DEAD;
                    dead += 1;
                }
            }
        }
    }
    let r = path.len();
    if r < 2 {
        return None;
    }
    let w = window(order.len(), window_factor).min(r);
    let mut position = std::collections::HashMap::with_capacity(w);
    for (k, &v) in path.iter().enumerate().take(w) {
        position.insert(v, k);
    }
    let mut best: Option<(usize, usize)> = None;
    for i in (r - w..r).rev() {
        for &j in &adj[path[i]] {
            if let Some(&pj) = position.get(&j) {
                if pj < i && best.is_none_or(|(bi, bj)| i - pj > bi - bj) {
                    best = Some((i, pj));
                }
            }
        }
    }
    let (i, j) = best?;
    Some(path[j..=i].to_vec())
}

/// Key of a pair cycle under identity red edges.
pub fn identity_cycle_key(pairs: &[usize]) -> u64 {
    let seq: Vec<Vertex> = pairs.iter().flat_map(|&p| [Vertex::Right(p), Vertex::Left(p)]).collect();
    canonical_key(&seq)
}

/// Output of `many_cycles`.
#[derive(Debug, Clone, PartialEq)]
pub struct CycleFamily {
    /// Distinct cycles in discovery order.
    pub cycles: Vec<Vec<usize>>,
    pub subsets: usize,
    pub successes: usize,
}

/// Runs `dfs_long_cycle` on up to `k` half-size subsets of `[0, adj.len())`
/// whose pairwise symmetric differences are at least `adj.len() / 3`, and
/// keeps one cycle per canonical key.
pub fn many_cycles(adj: &[Vec<usize>], k: usize, window_factor: f64, seed: u64) -> CycleFamily {
    let n = adj.len();
    let mut family = CycleFamily { cycles: Vec::new(), subsets: 0, successes: 0 };
    if n < 2 || k == 0 {
        return family;
    }
    let mut rng = PlmRng::seed_from_u64(seed);
    let half = (n / 2).max(2).min(n);
    let min_diff = n.div_ceil(3);
    let mut chosen: Vec<Vec<bool>> = Vec::new();
    let mut keys = HashSet::new();
    let max_attempts = 200 * k;
    let mut attempts = 0;
    while chosen.len() < k && attempts < max_attempts {
        attempts += 1;
        let subset: Vec<usize> =
            if k == 1 || n == half { (0..half).collect() } else { sample(&mut rng, n, half).into_vec() };
        let mut mask = vec![false; n];
        for &v in &subset {
            mask[v] = true;
        }
        let far = chosen.iter().all(|m| m.iter().zip(&mask).filter(|(a, b)| a != b).count() >= min_diff);
        if !far {
            continue;
        }
        chosen.push(mask);
        family.subsets += 1;
        if let Some(c) = dfs_long_cycle(adj, &subset, window_factor) {
            family.successes += 1;
            if keys.insert(identity_cycle_key(&c)) {
                family.cycles.push(c);
            }
        }
    }
    family
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::from_seed;
    use rand::Rng;

    fn random_blue(n: usize, p: f64, seed: u64) -> Vec<Vec<usize>> {
        let mut rng = from_seed(seed);
        (0..n).map(|i| (0..n).filter(|&j| j != i && rng.random::<f64>() < p).collect()).collect()
    }

    fn is_cycle(adj: &[Vec<usize>], c: &[usize]) -> bool {
        let r = c.len();
        let distinct: HashSet<_> = c.iter().collect();
        distinct.len() == r && r >= 2 && (0..r).all(|a| adj[c[a]].contains(&c[(a + 1) % r]))
    }

    #[test]
    fn dense_random_graph_gives_long_cycles() {
        let n = 1000;
        for seed in 0..20 {
            let adj = random_blue(n, 900.0 / n as f64, seed);
            let all: Vec<usize> = (0..n).collect();
            let c = dfs_long_cycle(&adj, &all, 1.0).expect("cycle");
            assert!(is_cycle(&adj, &c));
            assert!(2 * c.len() >= 3 * n / 4, "seed {seed}: length {}", 2 * c.len());
        }
    }

    #[test]
    fn complete_graph_cycle_is_long() {
        for n in [2usize, 3, 8, 64] {
            let adj: Vec<Vec<usize>> = (0..n).map(|i| (0..n).filter(|&j| j != i).collect()).collect();
            let all: Vec<usize> = (0..n).collect();
            let c = dfs_long_cycle(&adj, &all, 1.0).unwrap();
            assert!(is_cycle(&adj, &c));
            assert!(4 * 2 * c.len() >= 3 * n, "n={n}, len {}", c.len());
        }
    }

    #[test]
    fn empty_graph_has_no_cycle() {
        let adj = vec![Vec::new(); 10];
        assert!(dfs_long_cycle(&adj, &(0..10).collect::<Vec<_>>(), 1.0).is_none());
    }

    #[test]
    fn many_cycles_counts() {
        let n = 40;
        let complete: Vec<Vec<usize>> = (0..n).map(|i| (0..n).filter(|&j| j != i).collect()).collect();
        assert_eq!(many_cycles(&complete, 1, 1.0, 3).cycles.len(), 1);
        let dense = random_blue(80, 0.5, 4);
        let fam = many_cycles(&dense, 50, 1.0, 5);
        assert_eq!(fam.subsets, 50);
        assert!(fam.cycles.len() >= 45, "{} distinct", fam.cycles.len());
        for c in &fam.cycles {
            assert!(is_cycle(&dense, c));
            assert!(2 * c.len() >= 3 * 40 / 4);
        }
    }
}
