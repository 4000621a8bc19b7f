//! Exact linear assignment (minimum cost perfect matching).
//!
//! The main solver is successive shortest augmenting paths with Dijkstra on
//! reduced costs over adjacency lists; absent pairs are simply not in the
//! graph. Dense inputs are solved on a pruned candidate graph whose duals are
//! then checked against every pair, growing the candidate set until they are
//! feasible everywhere. A textbook O(n^3) Hungarian routine is kept as an
//! independent cross-check.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    pub row_to_col: Vec<usize>,
    /// Row duals; `cost(i, j) - u[i] - v[j] >= 0` on every edge, with equality on matched ones.
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

impl Assignment {
    pub fn reduced_cost(&self, i: usize, j: usize, c: f64) -> f64 {
        c - self.u[i] - self.v[j]
    }
}

#[derive(Clone, Copy)]
struct HeapItem {
    dist: f64,
    col: usize,
}
impl PartialEq for HeapItem {
    fn eq(&self, o: &Self) -> bool {
        self.cmp(o) == Ordering::Equal
    }
}
impl Eq for HeapItem {}
impl PartialOrd for HeapItem {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for HeapItem {
    fn cmp(&self, o: &Self) -> Ordering {
        o.dist.total_cmp(&self.dist).then_with(|| o.col.cmp(&self.col))
    }
}

const FREE: usize = usize::MAX;

/// Minimum-cost perfect matching on a sparse bipartite graph given by rows of
/// `(column, cost)`. Costs must be finite. Returns `None` when no perfect
/// matching exists.
pub fn solve_sparse(n: usize, rows: &[Vec<(usize, f64)>]) -> Option<Assignment> {
    assert_eq!(rows.len(), n);
    let mut u = vec![0.0; n];
    for (i, r) in rows.iter().enumerate() {
        if r.is_empty() {
            return None;
        }
        u[i] = r.iter().map(|e| e.1).fold(f64::INFINITY, f64::min);
    }
    let mut v = vec![0.0; n];
    let mut row_to_col = vec![FREE; n];
    let mut col_to_row = vec![FREE; n];
    let mut dist = vec![f64::INFINITY; n];
    let mut pred = vec![FREE; n];
    let mut done = vec![false; n];
    let mut touched: Vec<usize> = Vec::new();
    let mut finalized: Vec<usize> = Vec::new();
    let mut heap = BinaryHeap::new();

    // cheap greedy start: tight edges into free columns
    for i in 0..n {
        for &(j, c) in &rows[i] {
            if col_to_row[j] == FREE && c - u[i] - v[j] == 0.0 {
                row_to_col[i] = j;
                col_to_row[j] = i;
                break;
            }
        }
    }

    for s in 0..n {
        if row_to_col[s] != FREE {
            continue;
        }
        for &j in &touched {
            dist[j] = f64::INFINITY;
            pred[j] = FREE;
            done[j] = false;
        }
        touched.clear();
        finalized.clear();
        heap.clear();
        for &(j, c) in &rows[s] {
            let d = (c - u[s] - v[j]).max(0.0);
            if d < dist[j] {
                if dist[j].is_infinite() {
                    touched.push(j);
                }
                dist[j] = d;
                pred[j] = s;
                heap.push(HeapItem { dist: d, col: j });
            }
        }
        let mut sink = FREE;
        let mut d_sink = 0.0;
        while let Some(HeapItem { dist: d, col: j }) = heap.pop() {
            if done[j] || d > dist[j] {
                continue;
            }
            if col_to_row[j] == FREE {
                sink = j;
                d_sink = d;
                break;
            }
            done[j] = true;
            finalized.push(j);
            let r = col_to_row[j];
            for &(k, c) in &rows[r] {
                if done[k] {
                    continue;
                }
                let nd = d + (c - u[r] - v[k]).max(0.0);
                if nd < dist[k] {
                    if dist[k].is_infinite() {
                        touched.push(k);
                    }
                    dist[k] = nd;
                    pred[k] = r;
                    heap.push(HeapItem { dist: nd, col: k });
                }
            }
        }
        if sink == FREE {
            return None;
        }
        u[s] += d_sink;
        for &j in &finalized {
            let shift = d_sink - dist[j];
            v[j] -= shift;
            u[col_to_row[j]] += shift;
        }
        let mut j = sink;
        loop {
            let r = pred[j];
            let next = row_to_col[r];
            row_to_col[r] = j;
            col_to_row[j] = r;
            if r == s {
                break;
            }
            j = next;
        }
    }
    Some(Assignment { row_to_col, u, v })
}

/// Dense minimum-cost assignment via a pruned candidate graph plus a global
/// dual feasibility check. `cost` is row-major `n x n`; `None` entries are absent.
pub fn solve_dense(n: usize, cost: &dyn Fn(usize, usize) -> Option<f64>, keep: usize) -> Option<Assignment> {
    let mut keep = keep.max(1);
    loop {
        let mut cand: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        let mut by_col: Vec<Vec<(f64, usize)>> = vec![Vec::new(); n];
        let mut max_abs = 0.0f64;
        for (i, row) in cand.iter_mut().enumerate() {
            let mut all: Vec<(f64, usize)> = Vec::with_capacity(n);
            for j in 0..n {
                if let Some(c) = cost(i, j) {
                    all.push((c, j));
                    max_abs = max_abs.max(c.abs());
                }
            }
            if all.is_empty() {
                return None;
            }
            let k = keep.min(all.len());
            all.select_nth_unstable_by(k - 1, |a, b| a.0.total_cmp(&b.0));
            for &(c, j) in &all[..k] {
                row.push((j, c));
            }
            for &(c, j) in &all {
                by_col[j].push((c, i));
            }
        }
        for (j, col) in by_col.iter_mut().enumerate() {
            if col.is_empty() {
                return None;
            }
            let k = keep.min(col.len());
            col.select_nth_unstable_by(k - 1, |a, b| a.0.total_cmp(&b.0));
            for &(c, i) in &col[..k] {
                cand[i].push((j, c));
            }
        }
        for row in cand.iter_mut() {
            row.sort_by_key(|e| e.0);
            row.dedup_by_key(|e| e.0);
        }
        let tol = 1e-12 * (1.0 + max_abs);
        let mut sol = match solve_sparse(n, &cand) {
            Some(s) => s,
            None => {
                if keep >= n {
                    return None;
                }
                keep = (keep * 2).min(n);
                continue;
            }
        };
        loop {
            let mut added = false;
            for i in 0..n {
                let mut extra = Vec::new();
                for j in 0..n {
                    if let Some(c) = cost(i, j) {
                        if sol.reduced_cost(i, j, c) < -tol && cand[i].binary_search_by_key(&j, |e| e.0).is_err() {
                            extra.push((j, c));
                        }
                    }
                }
                if !extra.is_empty() {
                    added = true;
                    cand[i].extend(extra);
                    cand[i].sort_by_key(|e| e.0);
                }
            }
            if !added {
                return Some(sol);
            }
            sol = solve_sparse(n, &cand)?;
        }
    }
}

/// Classical O(n^3) Hungarian method on a complete finite cost matrix.
pub fn hungarian(n: usize, cost: &[f64]) -> Assignment {
    assert_eq!(cost.len(), n * n);
    let inf = f64::INFINITY;
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
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
    let mut row_to_col = vec![0; n];
    for j in 1..=n {
        row_to_col[p[j] - 1] = j - 1;
    }
    Assignment { row_to_col, u: u[1..].to_vec(), v: v[1..].to_vec() }
}

/// Among perfect matchings using only `tight` edges, returns the one whose
/// row-to-column array is lexicographically smallest, starting from `start`
/// (which must itself use only tight edges).
pub fn lexicographic_min(n: usize, tight: &[Vec<usize>], start: &[usize]) -> Vec<usize> {
    let mut row_to_col = start.to_vec();
    let mut col_to_row = vec![FREE; n];
    for (i, &j) in row_to_col.iter().enumerate() {
        col_to_row[j] = i;
    }
    let mut stamp = vec![0u32; n];
    let mut epoch = 0u32;
    let mut parent_col = vec![FREE; n];
    let mut queue: Vec<usize> = Vec::new();
    for i in 0..n {
        let c0 = row_to_col[i];
        for &j in &tight[i] {
            if j >= c0 {
                break;
            }
            let r = col_to_row[j];
            if r < i {
                continue;
            }
            // re-seat row r somewhere among rows > i so that c0 is freed
            epoch += 1;
            queue.clear();
            queue.push(r);
            stamp[j] = epoch;
            let mut found = FREE;
            let mut head = 0;
            'bfs: while head < queue.len() {
                let row = queue[head];
                head += 1;
                for &c in &tight[row] {
                    if stamp[c] == epoch {
                        continue;
                    }
                    let owner = col_to_row[c];
                    if c != c0 && owner < i {
                        continue;
                    }
                    stamp[c] = epoch;
                    parent_col[c] = row;
                    if c == c0 {
                        found = c;
                        break 'bfs;
                    }
                    queue.push(owner);
                }
            }
            if found == FREE {
                continue;
            }
            let mut c = found;
            loop {
                let row = parent_col[c];
                let prev = row_to_col[row];
                row_to_col[row] = c;
                col_to_row[c] = row;
                if row == r {
                    break;
                }
                c = prev;
            }
            row_to_col[i] = j;
            col_to_row[j] = i;
            break;
        }
    }
    row_to_col
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::from_seed;
    use rand::Rng;

    fn brute(n: usize, cost: &[f64]) -> f64 {
        fn rec(n: usize, cost: &[f64], i: usize, used: &mut Vec<bool>) -> f64 {
            if i == n {
                return 0.0;
            }
            let mut best = f64::INFINITY;
            for j in 0..n {
                if !used[j] && cost[i * n + j].is_finite() {
                    used[j] = true;
                    best = best.min(cost[i * n + j] + rec(n, cost, i + 1, used));
                    used[j] = false;
                }
            }
            best
        }
        rec(n, cost, 0, &mut vec![false; n])
    }

    fn total(n: usize, cost: &[f64], m: &[usize]) -> f64 {
        (0..n).map(|i| cost[i * n + m[i]]).sum()
    }

    #[test]
    fn agrees_with_brute_force() {
        let mut rng = from_seed(17);
        for trial in 0..300 {
            let n = 1 + trial % 7;
            let cost: Vec<f64> = (0..n * n)
                .map(|_| if rng.random::<f64>() < 0.3 { f64::INFINITY } else { rng.random::<f64>() * 10.0 - 5.0 })
                .collect();
            let rows: Vec<Vec<(usize, f64)>> = (0..n)
                .map(|i| (0..n).filter(|&j| cost[i * n + j].is_finite()).map(|j| (j, cost[i * n + j])).collect())
                .collect();
            let best = brute(n, &cost);
            match solve_sparse(n, &rows) {
                None => assert!(best.is_infinite()),
                Some(a) => {
                    assert!((total(n, &cost, &a.row_to_col) - best).abs() < 1e-9);
                    for i in 0..n {
                        for &(j, c) in &rows[i] {
                            assert!(a.reduced_cost(i, j, c) > -1e-9);
                        }
                        let j = a.row_to_col[i];
                        assert!(a.reduced_cost(i, j, cost[i * n + j]).abs() < 1e-9);
                    }
                }
            }
        }
    }

    #[test]
    fn dense_pruned_matches_hungarian() {
        let mut rng = from_seed(5);
        for n in [1usize, 2, 5, 30, 120] {
            let cost: Vec<f64> = (0..n * n).map(|_| rng.random::<f64>() * 100.0).collect();
            let h = hungarian(n, &cost);
            let d = solve_dense(n, &|i, j| Some(cost[i * n + j]), 2).unwrap();
            assert!((total(n, &cost, &h.row_to_col) - total(n, &cost, &d.row_to_col)).abs() < 1e-8);
        }
    }

    #[test]
    fn infeasible_detected() {
        let rows = vec![vec![(0, 1.0)], vec![(0, 2.0)]];
        assert!(solve_sparse(2, &rows).is_none());
    }

    #[test]
    fn lexicographic_tie_break() {
        let tight = vec![vec![0, 1, 2], vec![0, 1, 2], vec![0, 1, 2]];
        assert_eq!(lexicographic_min(3, &tight, &[2, 0, 1]), vec![0, 1, 2]);
        let tight = vec![vec![0, 1], vec![0], vec![2]];
        assert_eq!(lexicographic_min(3, &tight, &[1, 0, 2]), vec![1, 0, 2]);
    }
}
