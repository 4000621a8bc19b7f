//! Planted matching instances: generation, serialization and densification.

use crate::dist::{DistError, WeightDistribution};
use crate::matching::Matching;
use crate::rng::substream;
use rand::seq::SliceRandom;
use rand::Rng;
use std::fmt;
use std::fmt::Write as _;
use std::str::FromStr;
use thiserror::Error;

/// Points on which the residual density of `densify` is checked.
const RESIDUAL_GRID: usize = 1024;
const MAX_REJECTIONS: usize = 1_000_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("infeasible mixture decomposition: residual density {value} < 0 at x = {x}")]
    NegativeResidual { x: f64, value: f64 },
    #[error("instance format error on line {line}: {message}")]
    Format { line: usize, message: String },
    #[error(transparent)]
    Dist(#[from] DistError),
}

#[derive(Debug, Clone, PartialEq)]
pub enum ModelDescriptor {
    Sparse { p: WeightDistribution, q: WeightDistribution },
    Dense { p: WeightDistribution, rho: WeightDistribution },
    Exponential { lambda: f64 },
    Unweighted,
}

impl ModelDescriptor {
    pub fn planted_law(&self) -> WeightDistribution {
        match self {
            ModelDescriptor::Sparse { p, .. } | ModelDescriptor::Dense { p, .. } => p.clone(),
            ModelDescriptor::Exponential { lambda } => WeightDistribution::Exponential { rate: *lambda },
            ModelDescriptor::Unweighted => WeightDistribution::PointMass { atom: 1.0 },
        }
    }

    /// Law of an unplanted weight at size `n`.
    pub fn unplanted_law(&self, n: usize) -> WeightDistribution {
        match self {
            ModelDescriptor::Sparse { q, .. } => q.clone(),
            ModelDescriptor::Dense { rho, .. } => rho.scaled(n as f64),
            ModelDescriptor::Exponential { .. } => WeightDistribution::Exponential { rate: 1.0 / n as f64 },
            ModelDescriptor::Unweighted => WeightDistribution::PointMass { atom: 1.0 },
        }
    }
}

impl fmt::Display for ModelDescriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelDescriptor::Sparse { p, q } => write!(f, "sparse({p},{q})"),
            ModelDescriptor::Dense { p, rho } => write!(f, "dense({p},{rho})"),
            ModelDescriptor::Exponential { lambda } => write!(f, "exponential({lambda:?})"),
            ModelDescriptor::Unweighted => write!(f, "unweighted"),
        }
    }
}

impl FromStr for ModelDescriptor {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = |m: &str| ModelError::InvalidParameter(format!("model descriptor '{s}': {m}"));
        let t = s.trim().to_ascii_lowercase();
        if t == "unweighted" {
            return Ok(ModelDescriptor::Unweighted);
        }
        let open = t.find('(').ok_or_else(|| bad("expected '('"))?;
        if !t.ends_with(')') {
            return Err(bad("expected ')'"));
        }
        let inner = &t[open + 1..t.len() - 1];
        match &t[..open] {
            "exponential" => {
                let lambda: f64 = inner.parse().map_err(|_| bad("invalid lambda"))?;
                Ok(ModelDescriptor::Exponential { lambda })
            }
            kind @ ("sparse" | "dense") => {
                let (a, b) = inner.split_once(',').ok_or_else(|| bad("expected two laws"))?;
                let p: WeightDistribution = a.parse()?;
                let q: WeightDistribution = b.parse()?;
                Ok(if kind == "sparse" {
                    ModelDescriptor::Sparse { p, q }
                } else {
                    ModelDescriptor::Dense { p, rho: q }
                })
            }
            _ => Err(bad("unknown model kind")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum EdgeStore {
    /// Per-left-vertex `(j, w)` lists sorted by `j`.
    Sparse(Vec<Vec<(usize, f64)>>),
    /// Row-major `n x n` weights; NaN marks a missing pair.
    Dense(Vec<f64>),
}

/// Observable part of an instance.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservedGraph {
    pub n: usize,
    pub d: f64,
    pub model: ModelDescriptor,
    pub seed: u64,
    store: EdgeStore,
}

impl ObservedGraph {
    /// Builds a graph from per-row adjacency; storage is chosen from `d`.
    pub fn from_rows(n: usize, d: f64, model: ModelDescriptor, seed: u64, mut rows: Vec<Vec<(usize, f64)>>) -> Self {
        for r in rows.iter_mut() {
            r.sort_by_key(|e| e.0);
        }
        let store = if d > n as f64 / 4.0 {
            let mut w = vec![f64::NAN; n * n];
            for (i, r) in rows.iter().enumerate() {
                for &(j, x) in r {
                    w[i * n + j] = x;
                }
            }
            EdgeStore::Dense(w)
        } else {
            EdgeStore::Sparse(rows)
        };
        ObservedGraph { n, d, model, seed, store }
    }

    pub fn is_dense_storage(&self) -> bool {
        matches!(self.store, EdgeStore::Dense(_))
    }

    pub fn weight(&self, i: usize, j: usize) -> Option<f64> {
        match &self.store {
            EdgeStore::Sparse(rows) => {
                let r = &rows[i];
                r.binary_search_by_key(&j, |e| e.0).ok().map(|k| r[k].1)
            }
            EdgeStore::Dense(w) => {
                let x = w[i * self.n + j];
                if x.is_nan() {
                    None
                } else {
                    Some(x)
                }
            }
        }
    }

    /// Present edges of left vertex `i`, in increasing `j`.
    pub fn row(&self, i: usize) -> Vec<(usize, f64)> {
        match &self.store {
            EdgeStore::Sparse(rows) => rows[i].clone(),
            EdgeStore::Dense(w) => (0..self.n)
                .filter_map(|j| {
                    let x = w[i * self.n + j];
                    (!x.is_nan()).then_some((j, x))
                })
                .collect(),
        }
    }

    pub fn rows(&self) -> Vec<Vec<(usize, f64)>> {
        (0..self.n).map(|i| self.row(i)).collect()
    }

    /// Present edges per right vertex, in increasing `i`.
    pub fn columns(&self) -> Vec<Vec<(usize, f64)>> {
        let mut cols = vec![Vec::new(); self.n];
        for i in 0..self.n {
            for (j, w) in self.row(i) {
                cols[j].push((i, w));
            }
        }
        cols
    }

    pub fn edge_count(&self) -> usize {
        match &self.store {
            EdgeStore::Sparse(rows) => rows.iter().map(Vec::len).sum(),
            EdgeStore::Dense(w) => w.iter().filter(|x| !x.is_nan()).count(),
        }
    }

    /// All edges sorted by `(i, j)`.
    pub fn edges(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::with_capacity(self.edge_count());
        for i in 0..self.n {
            out.extend(self.row(i).into_iter().map(|(j, w)| (i, j, w)));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlantedInstance {
    pub graph: ObservedGraph,
    pub planted: Matching,
}

/// An instance as read from disk; the planted trailer is optional.
#[derive(Debug, Clone, PartialEq)]
pub struct InstanceFile {
    pub graph: ObservedGraph,
    pub planted: Option<Matching>,
}

fn validate(n: usize, d: f64) -> Result<(), ModelError> {
    if n < 2 {
        return Err(ModelError::InvalidParameter("n must be at least 2".into()));
    }
    if !(d > 0.0) || d > n as f64 {
        return Err(ModelError::InvalidParameter(format!("mean degree {d} outside (0, n]")));
    }
    Ok(())
}

fn random_permutation(n: usize, seed: u64) -> Matching {
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut substream(seed, "permutation"));
    Matching::new(perm).expect("shuffle yields a permutation")
}

/// Visits the columns in `0..n` kept by independent Bernoulli(`prob`) trials,
/// using geometric skips so that the cost is proportional to the output.
fn bernoulli_columns<R: Rng>(n: usize, prob: f64, rng: &mut R, mut visit: impl FnMut(usize)) {
    if prob <= 0.0 {
        return;
    }
    if prob >= 1.0 {
        (0..n).for_each(visit);
        return;
    }
    let log_q = (-prob).ln_1p();
    let mut j: usize = 0;
    loop {
        let u: f64 = 1.0 - rng.random::<f64>();
        let skip = (u.ln() / log_q).floor();
        if skip >= (n - j) as f64 {
            return;
        }
        j += skip as usize;
        visit(j);
        j += 1;
        if j >= n {
            return;
        }
    }
}

fn assert_planted(inst: &PlantedInstance) {
    for (i, &j) in inst.planted.perm().iter().enumerate() {
        assert!(inst.graph.weight(i, j).is_some(), "planted edge ({i},{j}) missing");
    }
}

fn sparse_with_descriptor(
    n: usize,
    d: f64,
    p: &WeightDistribution,
    q: &WeightDistribution,
    model: ModelDescriptor,
    seed: u64,
) -> Result<PlantedInstance, ModelError> {
    validate(n, d)?;
    let planted = random_permutation(n, seed);
    let mut structure = substream(seed, "structure");
    let mut wp = substream(seed, "planted-weights");
    let mut wq = substream(seed, "unplanted-weights");
    let prob = d / n as f64;
    let mut rows = Vec::with_capacity(n);
    for i in 0..n {
        let pi = planted.partner(i);
        let mut cols = Vec::new();
        bernoulli_columns(n - 1, prob, &mut structure, |k| cols.push(if k >= pi { k + 1 } else { k }));
        let planted_w = p.sample(&mut wp);
        let mut row = Vec::with_capacity(cols.len() + 1);
        let mut placed = false;
        for j in cols {
            if !placed && j > pi {
                row.push((pi, planted_w));
                placed = true;
            }
            row.push((j, q.sample(&mut wq)));
        }
        if !placed {
            row.push((pi, planted_w));
        }
        rows.push(row);
    }
    let inst = PlantedInstance { graph: ObservedGraph::from_rows(n, d, model, seed, rows), planted };
    assert_planted(&inst);
    Ok(inst)
}

/// Sparse model: every non-planted pair present with probability `d/n`.
pub fn generate_sparse(
    n: usize,
    d: f64,
    p: &WeightDistribution,
    q: &WeightDistribution,
    seed: u64,
) -> Result<PlantedInstance, ModelError> {
    let model = ModelDescriptor::Sparse { p: p.clone(), q: q.clone() };
    sparse_with_descriptor(n, d, p, q, model, seed)
}

fn dense_with_descriptor(
    n: usize,
    p: &WeightDistribution,
    rho: &WeightDistribution,
    model: ModelDescriptor,
    seed: u64,
) -> Result<PlantedInstance, ModelError> {
    validate(n, n as f64)?;
    let planted = random_permutation(n, seed);
    let mut wp = substream(seed, "planted-weights");
    let mut wq = substream(seed, "unplanted-weights");
    let scale = n as f64;
    let mut rows = Vec::with_capacity(n);
    for i in 0..n {
        let pi = planted.partner(i);
        let planted_w = p.sample(&mut wp);
        let row: Vec<(usize, f64)> = (0..n)
            .map(|j| (j, if j == pi { planted_w } else { scale * rho.sample(&mut wq) }))
            .collect();
        rows.push(row);
    }
    let inst = PlantedInstance { graph: ObservedGraph::from_rows(n, scale, model, seed, rows), planted };
    assert_planted(&inst);
    Ok(inst)
}

/// Dense model: complete graph, unplanted weights `n * X` with `X ~ rho`.
pub fn generate_dense(
    n: usize,
    p: &WeightDistribution,
    rho: &WeightDistribution,
    seed: u64,
) -> Result<PlantedInstance, ModelError> {
    let model = ModelDescriptor::Dense { p: p.clone(), rho: rho.clone() };
    dense_with_descriptor(n, p, rho, model, seed)
}

/// Exponential model: `P = Exp(lambda)`, unplanted `Exp(1/n)`, complete graph.
pub fn generate_exponential(n: usize, lambda: f64, seed: u64) -> Result<PlantedInstance, ModelError> {
    let p = WeightDistribution::exponential(lambda)?;
    let rho = WeightDistribution::Exponential { rate: 1.0 };
    dense_with_descriptor(n, &p, &rho, ModelDescriptor::Exponential { lambda }, seed)
}

/// Unweighted model: every weight equals one.
pub fn generate_unweighted(n: usize, d: f64, seed: u64) -> Result<PlantedInstance, ModelError> {
    let one = WeightDistribution::PointMass { atom: 1.0 };
    sparse_with_descriptor(n, d, &one, &one, ModelDescriptor::Unweighted, seed)
}

/// Regenerates an instance from its header fields.
pub fn regenerate(n: usize, d: f64, model: &ModelDescriptor, seed: u64) -> Result<PlantedInstance, ModelError> {
    match model {
        ModelDescriptor::Sparse { p, q } => generate_sparse(n, d, p, q, seed),
        ModelDescriptor::Dense { p, rho } => generate_dense(n, p, rho, seed),
        ModelDescriptor::Exponential { lambda } => generate_exponential(n, *lambda, seed),
        ModelDescriptor::Unweighted => generate_unweighted(n, d, seed),
    }
}

/// Residual mixture component `(q - t q') / (1 - t)`, sampled by rejection from `q`.
struct Residual<'a> {
    q: &'a WeightDistribution,
    q_prime: &'a WeightDistribution,
    t: f64,
}

impl Residual<'_> {
    fn check(&self) -> Result<(), ModelError> {
        let (q, qp, t) = (self.q, self.q_prime, self.t);
        match (q.is_continuous(), qp.is_continuous()) {
            (true, true) => {
                let (a0, b0) = qp.support();
                let b0 = if b0.is_infinite() { qp.quantile(1.0 - 1e-12) } else { b0 };
                for k in 0..RESIDUAL_GRID {
                    let x = a0 + (b0 - a0) * k as f64 / (RESIDUAL_GRID - 1) as f64;
                    let value = q.density(x) - t * qp.density(x);
                    if value < -1e-12 * q.density(x).max(1e-300) {
                        return Err(ModelError::NegativeResidual { x, value });
                    }
                }
                Ok(())
            }
            (false, false) => {
                for k in 0..RESIDUAL_GRID {
                    let x = qp.quantile((k as f64 + 0.5) / RESIDUAL_GRID as f64);
                    let value = q.density(x) - t * qp.density(x);
                    if value < -1e-12 {
                        return Err(ModelError::NegativeResidual { x, value });
                    }
                }
                Ok(())
            }
            _ => {
                let x = qp.quantile(0.5);
                Err(ModelError::NegativeResidual { x, value: -t * qp.density(x) })
            }
        }
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> Result<f64, ModelError> {
        for _ in 0..MAX_REJECTIONS {
            let x = self.q.sample(rng);
            let accept = 1.0 - self.t * self.q_prime.density(x) / self.q.density(x);
            if rng.random::<f64>() < accept {
                return Ok(x);
            }
        }
        Err(ModelError::InvalidParameter("residual law has negligible mass; rejection sampler gave up".into()))
    }
}

/// Randomized map from a sparse instance at degree `d'` to one at `target_d`
/// with unplanted law `target_q`. Never reads the planted permutation.
pub fn densify_graph(
    g: &ObservedGraph,
    target_d: f64,
    target_q: &WeightDistribution,
    seed: u64,
) -> Result<ObservedGraph, ModelError> {
    let (p, q_prime) = match &g.model {
        ModelDescriptor::Sparse { p, q } => (p.clone(), q.clone()),
        ModelDescriptor::Unweighted => {
            let one = WeightDistribution::PointMass { atom: 1.0 };
            (one.clone(), one)
        }
        _ => return Err(ModelError::InvalidParameter("densify needs a sparse instance".into())),
    };
    let n = g.n;
    let d_prime = g.d;
    validate(n, target_d)?;
    if target_d < d_prime {
        return Err(ModelError::InvalidParameter(format!("target degree {target_d} below current {d_prime}")));
    }
    let one = WeightDistribution::PointMass { atom: 1.0 };
    let model = if p == one && *target_q == one {
        ModelDescriptor::Unweighted
    } else {
        ModelDescriptor::Sparse { p, q: target_q.clone() }
    };
    let mut rows = g.rows();
    if target_d == d_prime {
        return Ok(ObservedGraph::from_rows(n, target_d, model, seed, rows));
    }
    let t = d_prime / target_d;
    let residual = Residual { q: target_q, q_prime: &q_prime, t };
    residual.check()?;
    let r = (target_d - d_prime) / (1.0 - d_prime / n as f64);
    let mut structure = substream(seed, "densify-structure");
    let mut weights = substream(seed, "densify-weights");
    for row in rows.iter_mut() {
        let mut added = Vec::new();
        bernoulli_columns(n, r / n as f64, &mut structure, |j| {
            if row.binary_search_by_key(&j, |e| e.0).is_err() {
                added.push(j);
            }
        });
        for j in added {
            row.push((j, residual.sample(&mut weights)?));
        }
        row.sort_by_key(|e| e.0);
    }
    Ok(ObservedGraph::from_rows(n, target_d, model, seed, rows))
}

/// `densify_graph` applied to a planted instance; the planted permutation is carried over untouched.
pub fn densify(
    sparse: &PlantedInstance,
    target_d: f64,
    target_q: &WeightDistribution,
    seed: u64,
) -> Result<PlantedInstance, ModelError> {
    let graph = densify_graph(&sparse.graph, target_d, target_q, seed)?;
    Ok(PlantedInstance { graph, planted: sparse.planted.clone() })
}

/// 17 significant digits in scientific notation.
pub fn fmt17(x: f64) -> String {
    if x.is_nan() {
        "NaN".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x:.16e}")
    }
}

pub fn write_instance(graph: &ObservedGraph, planted: Option<&Matching>) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "PLM v1 n={} d={:?} model={} seed={}", graph.n, graph.d, graph.model, graph.seed);
    for (i, j, w) in graph.edges() {
        let _ = writeln!(s, "{i} {j} {}", fmt17(w));
    }
    if let Some(m) = planted {
        s.push_str("#PLANTED\n");
        let parts: Vec<String> = m.perm().iter().map(|j| j.to_string()).collect();
        s.push_str(&parts.join(" "));
        s.push('\n');
    }
    s
}

pub fn read_instance(text: &str) -> Result<InstanceFile, ModelError> {
    let err = |line: usize, message: String| ModelError::Format { line, message };
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| err(1, "empty input".into()))?;
    let mut toks = header.split_whitespace();
    if toks.next() != Some("PLM") || toks.next() != Some("v1") {
        return Err(err(1, "expected header 'PLM v1'".into()));
    }
    let (mut n, mut d, mut model, mut seed) = (None, None, None, None);
    for tok in toks {
        let (k, v) = tok.split_once('=').ok_or_else(|| err(1, format!("malformed field '{tok}'")))?;
        match k {
            "n" => n = Some(v.parse::<usize>().map_err(|e| err(1, e.to_string()))?),
            "d" => d = Some(v.parse::<f64>().map_err(|e| err(1, e.to_string()))?),
            "model" => model = Some(v.parse::<ModelDescriptor>().map_err(|e| err(1, e.to_string()))?),
            "seed" => seed = Some(v.parse::<u64>().map_err(|e| err(1, e.to_string()))?),
            _ => return Err(err(1, format!("unknown field '{k}'"))),
        }
    }
    let n = n.ok_or_else(|| err(1, "missing n".into()))?;
    let d = d.ok_or_else(|| err(1, "missing d".into()))?;
    let model = model.ok_or_else(|| err(1, "missing model".into()))?;
    let seed = seed.ok_or_else(|| err(1, "missing seed".into()))?;
    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    let mut planted = None;
    while let Some((k, line)) = lines.next() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if line == "#PLANTED" {
            let (k2, perm_line) = lines.next().ok_or_else(|| err(k + 2, "missing planted permutation".into()))?;
            let perm: Result<Vec<usize>, _> = perm_line.split_whitespace().map(str::parse).collect();
            let perm = perm.map_err(|e| err(k2 + 1, e.to_string()))?;
            if perm.len() != n {
                return Err(err(k2 + 1, format!("planted permutation has {} entries, expected {n}", perm.len())));
            }
            planted = Some(Matching::new(perm).map_err(|e| err(k2 + 1, e.to_string()))?);
            break;
        }
        let f: Vec<&str> = line.split_whitespace().collect();
        if f.len() != 3 {
            return Err(err(k + 1, "expected 'i j w'".into()));
        }
        let i: usize = f[0].parse().map_err(|_| err(k + 1, format!("bad index '{}'", f[0])))?;
        let j: usize = f[1].parse().map_err(|_| err(k + 1, format!("bad index '{}'", f[1])))?;
        let w: f64 = f[2].parse().map_err(|_| err(k + 1, format!("bad weight '{}'", f[2])))?;
        if i >= n || j >= n {
            return Err(err(k + 1, format!("index out of range in '{line}'")));
        }
        rows[i].push((j, w));
    }
    for (i, r) in rows.iter_mut().enumerate() {
        r.sort_by_key(|e| e.0);
        if r.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(err(0, format!("duplicate edge in row {i}")));
        }
    }
    Ok(InstanceFile { graph: ObservedGraph::from_rows(n, d, model, seed, rows), planted })
}

/// Sizes (in vertices) of the connected components of the observable graph, largest first.
pub fn component_sizes(g: &ObservedGraph) -> Vec<usize> {
    let n = g.n;
    let mut parent: Vec<usize> = (0..2 * n).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    for i in 0..n {
        for (j, _) in g.row(i) {
            let a = find(&mut parent, i);
            let b = find(&mut parent, n + j);
            if a != b {
                parent[a] = b;
            }
        }
    }
    let mut count = vec![0usize; 2 * n];
    for v in 0..2 * n {
        let r = find(&mut parent, v);
        count[r] += 1;
    }
    let mut sizes: Vec<usize> = count.into_iter().filter(|&c| c > 0).collect();
    sizes.sort_unstable_by(|a, b| b.cmp(a));
    sizes
}


#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_degree_gives_complete_graph() {
        let e = WeightDistribution::exponential(1.0).unwrap();
        let inst = generate_sparse(4, 4.0, &e, &e, 11).unwrap();
        assert_eq!(inst.graph.edge_count(), 16);
    }

    #[test]
    fn rejects_bad_degree() {
        let e = WeightDistribution::exponential(1.0).unwrap();
        assert!(generate_sparse(4, 5.0, &e, &e, 1).is_err());
        assert!(generate_sparse(4, 0.0, &e, &e, 1).is_err());
    }

    #[test]
    fn dense_counts_and_planted_law() {
        let inst = generate_exponential(3, 2.0, 5).unwrap();
        assert_eq!(inst.graph.edge_count(), 9);
        assert!(inst.graph.is_dense_storage());
        let inst = generate_exponential(2, 4.0, 5).unwrap();
        assert_eq!(inst.graph.edge_count(), 4);
    }

    #[test]
    fn unweighted_all_ones() {
        let inst = generate_unweighted(200, 3.0, 9).unwrap();
        assert!(inst.graph.edges().iter().all(|e| e.2 == 1.0));
    }

    #[test]
    fn seed_determinism_and_roundtrip() {
        let e = WeightDistribution::exponential(2.0).unwrap();
        let f = WeightDistribution::folded_gaussian(3.0).unwrap();
        let a = generate_sparse(50, 3.0, &e, &f, 42).unwrap();
        let b = generate_sparse(50, 3.0, &e, &f, 42).unwrap();
        let ta = write_instance(&a.graph, Some(&a.planted));
        assert_eq!(ta, write_instance(&b.graph, Some(&b.planted)));
        let back = read_instance(&ta).unwrap();
        assert_eq!(back.graph, a.graph);
        assert_eq!(back.planted.as_ref(), Some(&a.planted));
        let blind = read_instance(&write_instance(&a.graph, None)).unwrap();
        assert!(blind.planted.is_none());
        let regen = regenerate(a.graph.n, a.graph.d, &back.graph.model, back.graph.seed).unwrap();
        assert_eq!(regen, a);
    }

    #[test]
    fn descriptor_roundtrip() {
        for m in ["sparse(exp:1.0,unif:0.0:2.0)", "dense(exp:4.0,exp:1.0)", "exponential(3.5)", "unweighted"] {
            let d: ModelDescriptor = m.parse().unwrap();
            assert_eq!(d.to_string(), m);
        }
    }

    #[test]
    fn dense_scaling_of_rho() {
        let e = WeightDistribution::exponential(1.0).unwrap();
        let m = ModelDescriptor::Dense { p: e.clone(), rho: e };
        assert_eq!(m.unplanted_law(10), WeightDistribution::Exponential { rate: 0.1 });
    }

    #[test]
    fn densify_identity_and_preservation() {
        let e = WeightDistribution::exponential(1.0).unwrap();
        let u = WeightDistribution::uniform(0.0, 1.0).unwrap();
        let inst = generate_sparse(300, 2.0, &e, &u, 3).unwrap();
        let same = densify(&inst, 2.0, &u, 9).unwrap();
        assert_eq!(same.graph.edges(), inst.graph.edges());
        let q = WeightDistribution::exponential(0.5).unwrap();
        // Exp(0.5) density at most 0.5 < 1 on [0,1]; t = 2/8 keeps the residual positive.
        let dense = densify(&inst, 8.0, &q, 9).unwrap();
        assert_eq!(dense.planted, inst.planted);
        for (i, j, w) in inst.graph.edges() {
            assert_eq!(dense.graph.weight(i, j), Some(w));
        }
        assert!(dense.graph.edge_count() > inst.graph.edge_count());
    }

    #[test]
    fn densify_detects_negative_residual() {
        let e = WeightDistribution::exponential(1.0).unwrap();
        let u = WeightDistribution::uniform(0.0, 1.0).unwrap();
        let inst = generate_sparse(100, 2.0, &e, &u, 3).unwrap();
        let narrow = WeightDistribution::uniform(0.0, 0.5).unwrap();
        assert!(matches!(densify(&inst, 3.0, &narrow, 1), Err(ModelError::NegativeResidual { .. })));
    }

    #[test]
    fn read_rejects_garbage() {
        assert!(read_instance("").is_err());
        assert!(read_instance("PLM v2 n=2").is_err());
        assert!(read_instance("PLM v1 n=2 d=1.0 model=unweighted seed=1\n0 5 1.0\n").is_err());
    }
}
