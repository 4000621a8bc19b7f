//! Exact Gibbs posterior over perfect matchings for small instances.

use crate::matching::{reconstruction_error, LlrGraph, Matching};
use crate::model::PlantedInstance;
use rand::Rng;
use std::fmt::Write as _;
use thiserror::Error;

/// Largest size accepted by exhaustive enumeration.
pub const MAX_EXHAUSTIVE_N: usize = 9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PosteriorError {
    #[error("n = {0} exceeds the exhaustive enumeration cap of {MAX_EXHAUSTIVE_N}")]
    TooLarge(usize),
    #[error("no matching has positive likelihood")]
    Empty,
}

/// Matchings with finite likelihood and their unnormalized log-likelihoods.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorTable {
    pub n: usize,
    pub entries: Vec<(Matching, f64)>,
    pub log_z: f64,
}

impl PosteriorTable {
    /// Normalized log-mass of entry `k`.
    pub fn log_mass(&self, k: usize) -> f64 {
        self.entries[k].1 - self.log_z
    }

    pub fn mass(&self, k: usize) -> f64 {
        self.log_mass(k).exp()
    }

    /// Normalized log-mass of `m`, `-inf` if absent.
    pub fn log_mass_of(&self, m: &Matching) -> f64 {
        self.entries
            .iter()
            .find(|(e, _)| e == m)
            .map(|(_, l)| l - self.log_z)
            .unwrap_or(f64::NEG_INFINITY)
    }

    /// Entry with the largest likelihood; ties go to the earlier permutation in lexicographic order.
    pub fn argmax(&self) -> &Matching {
        &self
            .entries
            .iter()
            .max_by(|a, b| a.1.total_cmp(&b.1).then_with(|| b.0.cmp(&a.0)))
            .expect("table is nonempty")
            .0
    }

    /// Lines `<perm> <log-mass>` sorted by descending mass.
    pub fn dump(&self) -> String {
        let mut order: Vec<usize> = (0..self.entries.len()).collect();
        order.sort_by(|&a, &b| self.entries[b].1.total_cmp(&self.entries[a].1).then(self.entries[a].0.cmp(&self.entries[b].0)));
        let mut s = String::new();
        for k in order {
            let _ = writeln!(s, "{} {}", self.entries[k].0, crate::model::fmt17(self.log_mass(k)));
        }
        s
    }
}

pub fn log_sum_exp(values: impl IntoIterator<Item = f64>) -> f64 {
    let v: Vec<f64> = values.into_iter().collect();
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Excess weight of an edge set: blue llr minus red llr, red meaning planted.
pub fn excess_weight(edges: &[(usize, usize)], llr: &LlrGraph, truth: &Matching) -> f64 {
    let mut total = 0.0;
    for &(i, j) in edges {
        let v = llr.value(i, j);
        if truth.partner(i) == j {
            total -= v;
        } else {
            if v == f64::NEG_INFINITY {
                return f64::NEG_INFINITY;
            }
            total += v;
        }
    }
    total
}

/// Edge set of `a xor b`.
pub fn symmetric_difference(a: &Matching, b: &Matching) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for i in 0..a.n() {
        if a.partner(i) != b.partner(i) {
            out.push((i, a.partner(i)));
            out.push((i, b.partner(i)));
        }
    }
    out
}

/// Enumerates all `n!` permutations with Heap's algorithm.
pub fn for_each_permutation(n: usize, mut visit: impl FnMut(&[usize])) {
    let mut a: Vec<usize> = (0..n).collect();
    let mut c = vec![0usize; n];
    visit(&a);
    let mut i = 1;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                a.swap(0, i);
            } else {
                a.swap(c[i], i);
            }
            visit(&a);
            c[i] += 1;
            i = 1;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
}

pub fn exhaustive_posterior_llr(llr: &LlrGraph) -> Result<PosteriorTable, PosteriorError> {
    let n = llr.n();
    if n > MAX_EXHAUSTIVE_N {
        return Err(PosteriorError::TooLarge(n));
    }
    let mut entries = Vec::new();
    for_each_permutation(n, |p| {
        let mut l = 0.0;
        for (i, &j) in p.iter().enumerate() {
            l += llr.value(i, j);
            if l == f64::NEG_INFINITY {
                return;
            }
        }
        entries.push((Matching::new(p.to_vec()).expect("heap permutation"), l));
    });
    if entries.is_empty() {
        return Err(PosteriorError::Empty);
    }
    entries.sort_by(|a, b| a.0.cmp(&b.0));
    let log_z = log_sum_exp(entries.iter().map(|e| e.1));
    Ok(PosteriorTable { n, entries, log_z })
}

pub fn exhaustive_posterior(inst: &PlantedInstance) -> Result<PosteriorTable, PosteriorError> {
    exhaustive_posterior_llr(&crate::matching::build_llr(inst))
}

/// Marginal MAP estimate: the raw edge set and its projection to a perfect matching.
#[derive(Debug, Clone, PartialEq)]
pub struct MarginalMap {
    pub edges: Vec<(usize, usize)>,
    pub marginals: Vec<f64>,
    pub projection: Matching,
}

/// Includes edge `e` iff its posterior marginal is at least one half.
pub fn marginal_map(table: &PosteriorTable, llr: Option<&LlrGraph>) -> MarginalMap {
    let n = table.n;
    let mut marg = vec![0.0; n * n];
    for k in 0..table.entries.len() {
        let w = table.mass(k);
        for (i, &j) in table.entries[k].0.perm().iter().enumerate() {
            marg[i * n + j] += w;
        }
    }
    let edges: Vec<(usize, usize)> =
        (0..n * n).filter(|&e| marg[e] >= 0.5 - 1e-12).map(|e| (e / n, e % n)).collect();
    let mut order: Vec<usize> = (0..n * n).filter(|&e| marg[e] > 0.0).collect();
    order.sort_by(|&a, &b| marg[b].total_cmp(&marg[a]).then(a.cmp(&b)));
    let mut row = vec![usize::MAX; n];
    let mut col_used = vec![false; n];
    for e in order {
        let (i, j) = (e / n, e % n);
        if row[i] == usize::MAX && !col_used[j] {
            row[i] = j;
            col_used[j] = true;
        }
    }
    for i in 0..n {
        if row[i] != usize::MAX {
            continue;
        }
        let feasible = |j: usize| !col_used[j] && llr.map(|g| g.value(i, j) > f64::NEG_INFINITY).unwrap_or(true);
        let j = (0..n).find(|&j| feasible(j)).or_else(|| (0..n).find(|&j| !col_used[j])).expect("free column");
        row[i] = j;
        col_used[j] = true;
    }
    MarginalMap { edges, marginals: marg, projection: Matching::new(row).expect("greedy repair is a bijection") }
}

/// Inverse-CDF draw from the normalized table.
pub fn sample_posterior<R: Rng + ?Sized>(table: &PosteriorTable, rng: &mut R) -> Matching {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for k in 0..table.entries.len() {
        acc += table.mass(k);
        if u < acc {
            return table.entries[k].0.clone();
        }
    }
    table.entries.last().expect("table is nonempty").0.clone()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MassSplit {
    pub good_mass: f64,
    pub bad_mass: f64,
    /// `good_mass / mu(truth)`; `+inf` when the truth has zero mass.
    pub ratio_good: f64,
    pub ratio_bad: f64,
}

/// Splits posterior mass at reconstruction error `2 delta` around `truth`.
/// For `delta >= 1` every matching counts as good, the maximal error being 2.
pub fn mass_split(table: &PosteriorTable, truth: &Matching, delta: f64) -> MassSplit {
    let mut good = Vec::new();
    let mut bad = Vec::new();
    for k in 0..table.entries.len() {
        let e = reconstruction_error(&table.entries[k].0, truth).expect("sizes agree");
        if e < 2.0 * delta || delta >= 1.0 {
            good.push(table.log_mass(k));
        } else {
            bad.push(table.log_mass(k));
        }
    }
    let lg = log_sum_exp(good);
    let lb = log_sum_exp(bad);
    let lt = table.log_mass_of(truth);
    let ratio = |l: f64| if lt == f64::NEG_INFINITY { f64::INFINITY } else { (l - lt).exp() };
    MassSplit { good_mass: lg.exp(), bad_mass: lb.exp(), ratio_good: ratio(lg), ratio_bad: ratio(lb) }
}

fn binomial(n: u64, k: u64) -> u128 {
    let k = k.min(n - k);
    let mut r: u128 = 1;
    for i in 0..k {
        r = r * (n - i) as u128 / (i + 1) as u128;
    }
    r
}

/// Number of derangements of `l` elements.
pub fn derangements(l: u64) -> u128 {
    let (mut a, mut b): (u128, u128) = (1, 0);
    if l == 0 {
        return 1;
    }
    for k in 2..=l as u128 {
        let c = (k - 1) * (a + b);
        a = b;
        b = c;
    }
    b
}

/// Matchings that differ from a fixed one in exactly `l` rows.
pub fn count_matchings_at_distance(n: u64, l: u64) -> u128 {
    assert!(l <= n, "distance {l} exceeds n = {n}");
    derangements(l) * binomial(n, l)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::from_seed;

    #[test]
    fn heap_visits_all_permutations() {
        let mut seen = std::collections::HashSet::new();
        for_each_permutation(5, |p| {
            seen.insert(p.to_vec());
        });
        assert_eq!(seen.len(), 120);
    }

    #[test]
    fn two_matching_closed_form() {
        let (a, b, c, d) = (0.3, -1.2, 0.7, 2.0);
        let g = LlrGraph::from_matrix(2, &[a, b, c, d]);
        let t = exhaustive_posterior_llr(&g).unwrap();
        let expect = (a + d).exp() / ((a + d).exp() + (b + c).exp());
        assert!((t.log_mass_of(&Matching::identity(2)).exp() - expect).abs() < 1e-14);
    }

    #[test]
    fn uniform_when_uninformative() {
        let g = LlrGraph::from_matrix(4, &[0.0; 16]);
        let t = exhaustive_posterior_llr(&g).unwrap();
        assert_eq!(t.entries.len(), 24);
        for k in 0..24 {
            assert!((t.mass(k) - 1.0 / 24.0).abs() < 1e-14);
        }
        let split = mass_split(&t, &Matching::identity(4), 0.5);
        assert!((split.good_mass - 1.0 / 24.0).abs() < 1e-14);
        let all = mass_split(&t, &Matching::identity(4), 1.0);
        assert!((all.good_mass - 1.0).abs() < 1e-12);
        let tiny = mass_split(&t, &Matching::identity(4), 1e-9);
        assert!((tiny.ratio_good - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cap_enforced() {
        let g = LlrGraph::from_matrix(10, &[0.0; 100]);
        assert_eq!(exhaustive_posterior_llr(&g), Err(PosteriorError::TooLarge(10)));
    }

    #[test]
    fn excess_weight_examples() {
        let id = Matching::identity(2);
        let g = LlrGraph::from_matrix(2, &[1.0, 3.0, 2.0, 1.0]);
        assert_eq!(excess_weight(&[], &g, &id), 0.0);
        assert_eq!(excess_weight(&symmetric_difference(&id, &id), &g, &id), 0.0);
        assert_eq!(excess_weight(&[(0, 0), (0, 1), (1, 1), (1, 0)], &g, &id), 3.0);
        let h = LlrGraph::from_matrix(2, &[1.0, f64::NEG_INFINITY, 2.0, 1.0]);
        assert_eq!(excess_weight(&[(0, 1), (1, 0)], &h, &id), f64::NEG_INFINITY);
    }

    #[test]
    fn marginal_map_cases() {
        let l = (0.7f64 / 0.3).ln();
        let g = LlrGraph::from_matrix(2, &[l, 0.0, 0.0, 0.0]);
        let t = exhaustive_posterior_llr(&g).unwrap();
        let mm = marginal_map(&t, Some(&g));
        assert_eq!(mm.edges, vec![(0, 0), (1, 1)]);
        assert_eq!(mm.projection, Matching::identity(2));
        let sym = exhaustive_posterior_llr(&LlrGraph::from_matrix(2, &[0.0; 4])).unwrap();
        assert_eq!(marginal_map(&sym, None).edges.len(), 4);
    }

    #[test]
    fn sampling_frequency() {
        let l = (0.7f64 / 0.3).ln();
        let t = exhaustive_posterior_llr(&LlrGraph::from_matrix(2, &[l, 0.0, 0.0, 0.0])).unwrap();
        let mut rng = from_seed(4);
        let draws = 100_000;
        let hits = (0..draws).filter(|_| sample_posterior(&t, &mut rng) == Matching::identity(2)).count();
        let sigma = (0.21f64 / draws as f64).sqrt();
        assert!((hits as f64 / draws as f64 - 0.7).abs() < 3.0 * sigma);
    }

    #[test]
    fn counts() {
        assert_eq!(count_matchings_at_distance(5, 0), 1);
        assert_eq!(count_matchings_at_distance(5, 1), 0);
        for n in 0..=10u64 {
            let total: u128 = (0..=n).map(|l| count_matchings_at_distance(n, l)).sum();
            assert_eq!(total, (1..=n as u128).product::<u128>().max(1));
        }
        let e = std::f64::consts::E;
        for l in 1..=15u64 {
            let f: f64 = (1..=l).map(|k| k as f64).product();
            assert_eq!(derangements(l), (f / e).round() as u128);
        }
    }

    #[test]
    fn dump_sorted_by_mass() {
        let g = LlrGraph::from_matrix(2, &[2.0, 0.0, 0.0, 2.0]);
        let t = exhaustive_posterior_llr(&g).unwrap();
        let d = t.dump();
        assert!(d.starts_with("0 1 "));
        assert_eq!(d.lines().count(), 2);
    }
}
