//! Alternating cycles: validation, excess weight, canonical keys and flips.

use super::graph::ColoredGraph;
use crate::matching::Matching;
use crate::rng::stable_hash;
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Vertex {
    Left(usize),
    Right(usize),
}

impl Vertex {
    fn code(self) -> u64 {
        match self {
            Vertex::Left(i) => 2 * i as u64,
            Vertex::Right(j) => 2 * j as u64 + 1,
        }
    }
}

impl fmt::Display for Vertex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Vertex::Left(i) => write!(f, "{i}"),
            Vertex::Right(j) => write!(f, "{j}'"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Color {
    Red,
    Blue,
}

/// Edge `(left, right)` of a cycle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ColoredEdge {
    pub left: usize,
    pub right: usize,
    pub color: Color,
    pub llr: f64,
}

/// Outcome of `verify_alternating`.
#[derive(Debug, Clone, PartialEq)]
pub struct Verification {
    pub valid: bool,
    pub red: usize,
    pub blue: usize,
    pub delta: f64,
    /// First violation found, if any.
    pub violation: Option<String>,
}

/// Checks that `seq` is a closed alternating cycle of `g`: even length,
/// sides and colours alternate, red edges are planted, blue edges are
/// observed, and no vertex repeats.
pub fn verify_alternating(seq: &[Vertex], g: &ColoredGraph) -> Verification {
    let mut report = Verification { valid: false, red: 0, blue: 0, delta: 0.0, violation: None };
    let fail = |mut r: Verification, msg: String| {
        r.violation = Some(msg);
        r.delta = f64::NAN;
        r
    };
    let len = seq.len();
    if len < 4 || len % 2 == 1 {
        return fail(report, format!("length {len} is not an even number >= 4"));
    }
    let mut seen = std::collections::HashSet::with_capacity(len);
    for &v in seq {
        let idx = match v {
            Vertex::Left(i) | Vertex::Right(i) => i,
        };
        if idx >= g.n() {
            return fail(report, format!("vertex {v} out of range"));
        }
        if !seen.insert(v) {
            return fail(report, format!("vertex {v} repeats"));
        }
    }
    let mut prev: Option<Color> = None;
    let mut first: Option<Color> = None;
    for k in 0..len {
        let (a, b) = (seq[k], seq[(k + 1) % len]);
        let (i, j) = match (a, b) {
            (Vertex::Left(i), Vertex::Right(j)) | (Vertex::Right(j), Vertex::Left(i)) => (i, j),
            _ => return fail(report, format!("edge {a}-{b} joins two vertices on the same side")),
        };
        let color = if g.partner(i) == j { Color::Red } else { Color::Blue };
        match color {
            Color::Red => {
                report.red += 1;
                report.delta -= g.red_llr(i);
            }
            Color::Blue => match g.blue_llr(i, j) {
                Some(v) => {
                    report.blue += 1;
                    report.delta += v;
                }
                None => return fail(report, format!("blue edge {i}-{j}' is not in the graph")),
            },
        }
        if prev == Some(color) {
            return fail(report, format!("colours do not alternate at edge {a}-{b}"));
        }
        prev = Some(color);
        first.get_or_insert(color);
    }
    if first == prev {
        return fail(report, "colours do not alternate across the closing edge".to_string());
    }
    report.valid = true;
    report
}

/// An alternating cycle stored as a cyclic sequence of pairs `p_0, ..., p_{r-1}`:
/// red edges `(p_a, partner(p_a))`, blue edges `(p_a, partner(p_{a+1}))`.
#[derive(Debug, Clone, PartialEq)]
pub struct AlternatingCycle {
    pairs: Vec<usize>,
    vertices: Vec<Vertex>,
    edges: Vec<ColoredEdge>,
    delta: f64,
    key: u64,
}

impl AlternatingCycle {
    /// Builds from pairs; llr values come from `g`.
    pub fn from_pairs(pairs: Vec<usize>, g: &ColoredGraph) -> Result<Self, String> {
        let r = pairs.len();
        if r < 2 {
            return Err(format!("an alternating cycle needs at least 2 red edges, got {r}"));
        }
        let mut vertices = Vec::with_capacity(2 * r);
        for &p in &pairs {
            vertices.push(Vertex::Right(g.partner(p)));
            vertices.push(Vertex::Left(p));
        }
        let check = verify_alternating(&vertices, g);
        if !check.valid {
            return Err(check.violation.unwrap_or_default());
        }
        let mut edges = Vec::with_capacity(2 * r);
        for a in 0..r {
            let (p, next) = (pairs[a], pairs[(a + 1) % r]);
            edges.push(ColoredEdge { left: p, right: g.partner(p), color: Color::Red, llr: g.red_llr(p) });
            let right = g.partner(next);
            let llr = g.blue_llr(p, right).expect("verified blue edge");
            edges.push(ColoredEdge { left: p, right, color: Color::Blue, llr });
        }
        let key = canonical_key(&vertices);
        Ok(AlternatingCycle { pairs, vertices, edges, delta: check.delta, key })
    }

    /// Builds from a vertex sequence such as `(1, 2', 2, 3', 3, 1')`.
    pub fn from_vertices(seq: &[Vertex], g: &ColoredGraph) -> Result<Self, String> {
        let check = verify_alternating(seq, g);
        if !check.valid {
            return Err(check.violation.unwrap_or_default());
        }
        let len = seq.len();
        let red_start = |seq: &[Vertex]| {
            (0..len).find(|&k| match (seq[k], seq[(k + 1) % len]) {
                (Vertex::Right(j), Vertex::Left(i)) => g.partner(i) == j,
                _ => false,
            })
        };
        // Read the cycle as right, left, right, left with a red edge first.
        let mut seq = seq.to_vec();
        let start = match red_start(&seq) {
            Some(k) => k,
            None => {
                seq.reverse();
                red_start(&seq).expect("an alternating cycle has a red edge")
            }
        };
        let pairs = (0..len / 2)
            .map(|a| match seq[(start + 2 * a + 1) % len] {
                Vertex::Left(i) => i,
                Vertex::Right(_) => unreachable!("sides alternate"),
            })
            .collect();
        AlternatingCycle::from_pairs(pairs, g)
    }

    pub fn pairs(&self) -> &[usize] {
        &self.pairs
    }

    pub fn vertices(&self) -> &[Vertex] {
        &self.vertices
    }

    pub fn edges(&self) -> &[ColoredEdge] {
        &self.edges
    }

    /// Number of edges.
    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    /// Blue llr minus red llr.
    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn key(&self) -> u64 {
        self.key
    }

    /// The matching obtained by swapping red for blue along the cycle.
    pub fn flip(&self, planted: &Matching) -> Matching {
        let mut perm = planted.perm().to_vec();
        for e in &self.edges {
            if e.color == Color::Blue {
                perm[e.left] = e.right;
            }
        }
        Matching::new(perm).expect("flipping an alternating cycle yields a perfect matching")
    }

    /// `len=<2r> delta=<d> key=<hash>`.
    pub fn summary_line(&self) -> String {
        format!("len={} delta={} key={:016x}", self.len(), crate::model::fmt17(self.delta), self.key)
    }
}

/// Canonical sequence: rotation starting at the smallest vertex, read in the
/// direction whose second element is smaller.
pub fn canonical_sequence(seq: &[Vertex]) -> Vec<Vertex> {
    let len = seq.len();
    if len == 0 {
        return Vec::new();
    }
    let start = (0..len).min_by_key(|&k| seq[k].code()).unwrap_or(0);
    let fwd = seq[(start + 1) % len];
    let bwd = seq[(start + len - 1) % len];
    if fwd.code() <= bwd.code() {
        (0..len).map(|k| seq[(start + k) % len]).collect()
    } else {
        (0..len).map(|k| seq[(start + len - k) % len]).collect()
    }
}

pub fn canonical_key(seq: &[Vertex]) -> u64 {
    let words: Vec<u64> = canonical_sequence(seq).into_iter().map(Vertex::code).collect();
    stable_hash(&words)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::posterior::exhaustive_posterior;
    use crate::model::generate_sparse;
    use crate::dist::WeightDistribution;
    use crate::matching::reconstruction_error;

    fn figure1() -> (ColoredGraph, Vec<Vertex>) {
        // Pairs 0,1,2 play the roles of 1,2,3; blue edges 1-2', 2-3', 3-1'.
        let g = ColoredGraph::unweighted(3, &[(0, 1), (1, 2), (2, 0)]);
        let seq = vec![
            Vertex::Left(0),
            Vertex::Right(1),
            Vertex::Left(1),
            Vertex::Right(2),
            Vertex::Left(2),
            Vertex::Right(0),
        ];
        (g, seq)
    }

    #[test]
    fn figure_one_cycle_is_valid() {
        let (g, seq) = figure1();
        let v = verify_alternating(&seq, &g);
        assert!(v.valid, "{:?}", v.violation);
        assert_eq!((v.red, v.blue), (3, 3));
        let c = AlternatingCycle::from_vertices(&seq, &g).unwrap();
        assert_eq!(c.len(), 6);
        let flipped = c.flip(&Matching::identity(3));
        assert_eq!(flipped.perm(), &[1, 2, 0]);
    }

    #[test]
    fn invalid_sequences_are_rejected() {
        let (g, seq) = figure1();
        assert!(!verify_alternating(&seq[..5], &g).valid);
        let g2 = ColoredGraph::unweighted(3, &[(0, 1), (1, 2)]);
        let v = verify_alternating(&seq, &g2);
        assert!(!v.valid);
        assert!(v.violation.unwrap().contains("not in the graph"));
        let same_side = vec![Vertex::Left(0), Vertex::Left(1), Vertex::Right(1), Vertex::Right(0)];
        assert!(!verify_alternating(&same_side, &g).valid);
    }

    #[test]
    fn key_ignores_rotation_and_direction() {
        let (g, seq) = figure1();
        let base = canonical_key(&seq);
        for r in 0..seq.len() {
            let mut rot = seq.clone();
            rot.rotate_left(r);
            assert_eq!(canonical_key(&rot), base);
            rot.reverse();
            assert_eq!(canonical_key(&rot), base);
        }
        let c = AlternatingCycle::from_vertices(&seq, &g).unwrap();
        let mut rev = seq.clone();
        rev.reverse();
        assert_eq!(AlternatingCycle::from_vertices(&rev, &g).unwrap().key(), c.key());
    }

    #[test]
    fn flip_matches_posterior_ratio() {
        let p = WeightDistribution::exponential(1.5).unwrap();
        let q = WeightDistribution::exponential(1.0).unwrap();
        let mut checked = 0;
        for seed in 0..20 {
            let inst = generate_sparse(7, 4.0, &p, &q, seed).unwrap();
            let g = ColoredGraph::from_instance(&inst);
            let table = exhaustive_posterior(&inst).unwrap();
            let adj = g.pair_adjacency();
            // Enumerate 2- and 3-cycles of pairs.
            for a in 0..7 {
                for &b in &adj[a] {
                    if b == a {
                        continue;
                    }
                    let mut candidates = vec![vec![a, b]];
                    candidates.extend(adj[b].iter().filter(|&&c| c != a && c != b).map(|&c| vec![a, b, c]));
                    for pairs in candidates {
                        let Ok(c) = AlternatingCycle::from_pairs(pairs, &g) else { continue };
                        let m = c.flip(&inst.planted);
                        let err = reconstruction_error(&m, &inst.planted).unwrap();
                        assert!((err - c.len() as f64 / 7.0).abs() < 1e-12);
                        let ratio = table.log_mass_of(&m) - table.log_mass_of(&inst.planted);
                        assert!((ratio - c.delta()).abs() < 1e-9, "{ratio} vs {}", c.delta());
                        checked += 1;
                    }
                }
            }
        }
        assert!(checked > 20, "only {checked} cycles checked");
    }
}
