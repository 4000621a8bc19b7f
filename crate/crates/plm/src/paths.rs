//! Alternating-path machinery for the exponential model: lightness and
//! uniformity predicates, exp-minus-one bridges, Erlang utilities, the
//! first-moment bound and its Monte Carlo counterpart, and Turán extraction
//! of vertex-disjoint paths.

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use statrs::function::gamma::ln_gamma;
use std::collections::{BTreeSet, HashMap};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PathError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("{0} weight total is zero, deviation undefined")]
    ZeroTotal(&'static str),
}

/// Monte Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
}

impl Estimate {
    pub fn exact(value: f64) -> Self {
        Estimate { value, stderr: 0.0 }
    }

    fn from_samples(sum: f64, sum_sq: f64, trials: usize) -> Self {
        let t = trials as f64;
        let mean = sum / t;
        let var = if trials > 1 { ((sum_sq - t * mean * mean) / (t - 1.0)).max(0.0) } else { 0.0 };
        Estimate { value: mean, stderr: (var / t).sqrt() }
    }
}

/// Red weights `phi_1..phi_l` and blue weights `psi_1..psi_{l-1}` in path order.
#[derive(Debug, Clone, PartialEq)]
pub struct AlternatingPathSample {
    pub red: Vec<f64>,
    pub blue: Vec<f64>,
    pub starts_left: bool,
}

impl AlternatingPathSample {
    pub fn new(red: Vec<f64>, blue: Vec<f64>, starts_left: bool) -> Result<Self, PathError> {
        if red.is_empty() || red.len() != blue.len() + 1 {
            return Err(PathError::InvalidParameter(format!(
                "need |red| = |blue| + 1 >= 1, got {} and {}",
                red.len(),
                blue.len()
            )));
        }
        if red.iter().chain(&blue).any(|w| !(*w >= 0.0 && w.is_finite())) {
            return Err(PathError::InvalidParameter("weights must be finite and nonnegative".into()));
        }
        Ok(AlternatingPathSample { red, blue, starts_left })
    }

    /// Number of red edges.
    pub fn ell(&self) -> usize {
        self.red.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathStats {
    pub wt_r: f64,
    pub wt_b: f64,
    pub dev_r: f64,
    pub dev_b: f64,
}

fn max_deviation(weights: &[f64], total: f64) -> f64 {
    let len = weights.len() as f64;
    let mut partial = 0.0;
    let mut dev: f64 = 0.0;
    for (k, w) in weights.iter().enumerate() {
        partial += w * len / total;
        dev = dev.max((partial - (k + 1) as f64).abs());
    }
    dev
}

pub fn path_stats(path: &AlternatingPathSample) -> Result<PathStats, PathError> {
    let wt_r: f64 = path.red.iter().sum();
    let wt_b: f64 = path.blue.iter().sum();
    if wt_r <= 0.0 {
        return Err(PathError::ZeroTotal("red"));
    }
    if !path.blue.is_empty() && wt_b <= 0.0 {
        return Err(PathError::ZeroTotal("blue"));
    }
    let dev_b = if path.blue.is_empty() { 0.0 } else { max_deviation(&path.blue, wt_b) };
    Ok(PathStats { wt_r, wt_b, dev_r: max_deviation(&path.red, wt_r), dev_b })
}

/// `(a, b) = (2/lambda, (2 - zeta)/lambda)`.
pub fn light_centers(lambda: f64, zeta: f64) -> (f64, f64) {
    (2.0 / lambda, (2.0 - zeta) / lambda)
}

pub fn is_light(stats: &PathStats, ell: usize, a: f64, b: f64, eta: f64) -> bool {
    let l = ell as f64;
    (stats.wt_r - a * l).abs() <= eta / 2.0 && (stats.wt_b - b * (l - 1.0)).abs() <= eta / 2.0
}

pub fn is_uniform(stats: &PathStats, a_unif: f64) -> bool {
    stats.dev_r <= a_unif && stats.dev_b <= a_unif
}

/// Excess `(lambda - 1/n)(wt_r(Q) - wt_b(Q))` of every subpath with at least
/// `ceil(l/3)` red edges is at least `(lambda - 1/n) zeta0 eps l'`.
pub fn subpath_excess_ok(path: &AlternatingPathSample, n: f64, lambda: f64, zeta0: f64, eps: f64) -> bool {
    let ell = path.ell();
    let kappa = lambda - 1.0 / n;
    let mut pr = vec![0.0; ell + 1];
    for (i, w) in path.red.iter().enumerate() {
        pr[i + 1] = pr[i] + w;
    }
    let mut pb = vec![0.0; ell];
    for (i, w) in path.blue.iter().enumerate() {
        pb[i + 1] = pb[i] + w;
    }
    for lp in ell.div_ceil(3).max(1)..=ell {
        let need = kappa * zeta0 * eps * lp as f64;
        for k in 0..=ell - lp {
            let d = (pr[k + lp] - pr[k]) - (pb[k + lp - 1] - pb[k]);
            if kappa * d < need {
                return false;
            }
        }
    }
    true
}

/// Exp-minus-one bridge `R_0..R_l` with the total `X` it was normalized by.
#[derive(Debug, Clone, PartialEq)]
pub struct BridgeSample {
    pub r: Vec<f64>,
    pub total: f64,
}

impl BridgeSample {
    pub fn max_abs(&self) -> f64 {
        self.r.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    /// Normalized increments `X_i / X`.
    pub fn fractions(&self) -> Vec<f64> {
        let l = (self.r.len() - 1) as f64;
        self.r.windows(2).map(|w| (w[1] - w[0] + 1.0) / l).collect()
    }
}

fn exp_draws<R: Rng + ?Sized>(len: usize, rng: &mut R) -> Vec<f64> {
    (0..len).map(|_| Exp1.sample(rng)).collect()
}

pub fn sample_bridge<R: Rng + ?Sized>(ell: usize, rng: &mut R) -> BridgeSample {
    assert!(ell >= 1, "bridge length must be positive");
    let xs = exp_draws(ell, rng);
    let total: f64 = xs.iter().sum();
    let l = ell as f64;
    let mut r = Vec::with_capacity(ell + 1);
    r.push(0.0);
    let mut acc = 0.0;
    for x in &xs[..ell - 1] {
        acc += x * l / total - 1.0;
        r.push(acc);
    }
    r.push(0.0);
    BridgeSample { r, total }
}

/// Maximum of `|R_j|` without materializing the bridge.
fn bridge_range<R: Rng + ?Sized>(ell: usize, rng: &mut R, buf: &mut Vec<f64>) -> f64 {
    buf.clear();
    let mut total = 0.0;
    for _ in 0..ell {
        let x: f64 = Exp1.sample(rng);
        total += x;
        buf.push(x);
    }
    let scale = ell as f64 / total;
    let mut acc = 0.0;
    let mut m: f64 = 0.0;
    for x in &buf[..ell.saturating_sub(1)] {
        acc += x * scale - 1.0;
        m = m.max(acc.abs());
    }
    m
}

/// Monte Carlo `P(max_j |R_j| <= A)`.
pub fn bridge_range_prob<R: Rng + ?Sized>(ell: usize, a_unif: f64, trials: usize, rng: &mut R) -> Estimate {
    if a_unif >= ell as f64 {
        return Estimate::exact(1.0);
    }
    let mut buf = Vec::with_capacity(ell);
    let hits = (0..trials).filter(|_| bridge_range(ell, rng, &mut buf) <= a_unif).count();
    let p = hits as f64 / trials as f64;
    Estimate { value: p, stderr: (p * (1.0 - p) / trials as f64).sqrt() }
}

/// Fit of `log P(max |R_j| <= A) ~ intercept - c l / A^2`.
#[derive(Debug, Clone, PartialEq)]
pub struct BridgeFit {
    pub c: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub points: Vec<(usize, Estimate)>,
}

pub fn fit_bridge_constant<R: Rng + ?Sized>(ells: &[usize], a_unif: f64, trials: usize, rng: &mut R) -> BridgeFit {
    let points: Vec<(usize, Estimate)> =
        ells.iter().map(|&l| (l, bridge_range_prob(l, a_unif, trials, rng))).collect();
    let xy: Vec<(f64, f64)> =
        points.iter().filter(|(_, e)| e.value > 0.0).map(|(l, e)| (*l as f64, e.value.ln())).collect();
    let (slope, intercept, r_squared) = linear_fit(&xy);
    BridgeFit { c: -slope * a_unif * a_unif, intercept, r_squared, points }
}

/// Least squares `(slope, intercept, R^2)`.
pub fn linear_fit(xy: &[(f64, f64)]) -> (f64, f64, f64) {
    let k = xy.len() as f64;
    let mx = xy.iter().map(|p| p.0).sum::<f64>() / k;
    let my = xy.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = xy.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = xy.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = xy.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = sxy / sxx;
    let r2 = if syy > 0.0 { sxy * sxy / (sxx * syy) } else { 1.0 };
    (slope, my - slope * mx, r2)
}

pub fn erlang_log_pdf(ell: usize, rate: f64, x: f64) -> f64 {
    if x < 0.0 {
        return f64::NEG_INFINITY;
    }
    let l = ell as f64;
    if x == 0.0 {
        return if ell == 1 { rate.ln() } else { f64::NEG_INFINITY };
    }
    l * rate.ln() + (l - 1.0) * x.ln() - rate * x - ln_gamma(l)
}

pub fn erlang_pdf(ell: usize, rate: f64, x: f64) -> f64 {
    erlang_log_pdf(ell, rate, x).exp()
}

/// `exp(-n (xi - log xi - 1))`, bounding the upper tail for `xi > 1` and the
/// lower tail for `xi < 1` of a sum of `n` standard exponentials at `n xi`.
pub fn erlang_chernoff(n: usize, xi: f64) -> f64 {
    if xi <= 0.0 {
        return 0.0;
    }
    if xi == 1.0 {
        return 1.0;
    }
    (-(n as f64) * (xi - xi.ln() - 1.0)).exp()
}

/// `log(n (n-1) ... (n-l+1))`.
pub fn log_num_paths(n: usize, ell: usize) -> f64 {
    if ell > n {
        return f64::NEG_INFINITY;
    }
    (0..ell).map(|k| ((n - k) as f64).ln()).sum()
}

/// Lower bound `exp(-2 c0 l / A^2)` on the uniformity probability.
pub fn p_ell_lower(ell: usize, a_unif: f64, c0: f64) -> f64 {
    (-2.0 * c0 * ell as f64 / (a_unif * a_unif)).exp()
}

fn check_moment_params(lambda: f64, zeta: f64, eta: f64, a_unif: f64, ell: usize) -> Result<f64, PathError> {
    if !(lambda > 0.0 && lambda <= 4.0) {
        return Err(PathError::InvalidParameter(format!("lambda = {lambda} outside (0, 4]")));
    }
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(PathError::InvalidParameter(format!("eta = {eta} outside (0, 1]")));
    }
    if !(a_unif >= 1.0) || (ell as f64) < a_unif * a_unif {
        return Err(PathError::InvalidParameter(format!("need A >= 1 and l >= A^2, got A = {a_unif}, l = {ell}")));
    }
    Ok((2.0 - zeta) / lambda)
}

/// `log` of `n (eta^2 lambda / (8 e^3 b l)) (2b e^{-b/n})^{l-1} e^{-l^2/n} p_l`.
#[allow(clippy::too_many_arguments)]
pub fn log_first_moment_bound(
    n: usize,
    ell: usize,
    lambda: f64,
    zeta: f64,
    eta: f64,
    a_unif: f64,
    p_ell: f64,
) -> Result<f64, PathError> {
    let b = check_moment_params(lambda, zeta, eta, a_unif, ell)?;
    if b <= 0.0 {
        return Err(PathError::InvalidParameter(format!("b = {b} must be positive")));
    }
    if p_ell <= 0.0 {
        return Ok(f64::NEG_INFINITY);
    }
    let (nf, l) = (n as f64, ell as f64);
    Ok(nf.ln() + (eta * eta * lambda / (8.0 * b * l)).ln() - 3.0
        + (l - 1.0) * ((2.0 * b).ln() - b / nf)
        - l * l / nf
        + p_ell.ln())
}

pub fn first_moment_bound(
    n: usize,
    ell: usize,
    lambda: f64,
    zeta: f64,
    eta: f64,
    a_unif: f64,
    p_ell: f64,
) -> Result<f64, PathError> {
    log_first_moment_bound(n, ell, lambda, zeta, eta, a_unif, p_ell).map(f64::exp)
}

/// `P(lo <= Erlang(k, rate) <= hi)` by uniform sampling on the window,
/// as `(log scale, estimate of the scaled probability)`.
fn window_probability<R: Rng + ?Sized>(k: usize, rate: f64, lo: f64, hi: f64, trials: usize, rng: &mut R) -> (f64, Estimate) {
    let lo = lo.max(0.0);
    if hi < lo {
        return (0.0, Estimate::exact(0.0));
    }
    if k == 0 {
        return (0.0, Estimate::exact(if lo <= 0.0 { 1.0 } else { 0.0 }));
    }
    let mode = (k as f64 - 1.0) / rate;
    let log_max = erlang_log_pdf(k, rate, mode.clamp(lo, hi));
    let width = hi - lo;
    let (mut s, mut s2) = (0.0, 0.0);
    for _ in 0..trials {
        let x = lo + width * rng.random::<f64>();
        let w = width * (erlang_log_pdf(k, rate, x) - log_max).exp();
        s += w;
        s2 += w * w;
    }
    (log_max, Estimate::from_samples(s, s2, trials))
}

/// Factors of the `E|S|` estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct SEstimate {
    pub estimate: Estimate,
    pub log_value: f64,
    pub log_num_paths: f64,
    pub log_p_light_red: f64,
    pub log_p_light_blue: f64,
    pub p_uniform: Estimate,
}

/// `E|S| = |P_l| P(light) P(A-uniform)` with each factor estimated separately.
#[allow(clippy::too_many_arguments)]
pub fn estimate_expected_s<R: Rng + ?Sized>(
    n: usize,
    ell: usize,
    lambda: f64,
    zeta: f64,
    eta: f64,
    a_unif: f64,
    trials: usize,
    rng: &mut R,
) -> Result<SEstimate, PathError> {
    let b = check_moment_params(lambda, zeta, eta, a_unif, ell)?;
    if trials == 0 {
        return Err(PathError::InvalidParameter("trials must be positive".into()));
    }
    let a = 2.0 / lambda;
    let l = ell as f64;
    let nf = n as f64;
    let (lr, red) = window_probability(ell, lambda, a * l - eta / 2.0, a * l + eta / 2.0, trials, rng);
    let bc = b * (l - 1.0);
    let (lb, blue) = window_probability(ell - 1, 1.0 / nf, bc - eta / 2.0, bc + eta / 2.0, trials, rng);
    let mut buf = Vec::with_capacity(ell);
    let hits = (0..trials)
        .filter(|_| {
            let r = bridge_range(ell, rng, &mut buf);
            let bl = if ell > 1 { bridge_range(ell - 1, rng, &mut buf) } else { 0.0 };
            r <= a_unif && bl <= a_unif
        })
        .count();
    let pu = hits as f64 / trials as f64;
    let p_uniform = Estimate { value: pu, stderr: (pu * (1.0 - pu) / trials as f64).sqrt() };
    let lp = log_num_paths(n, ell);
    let log_p_light_red = lr + red.value.ln();
    let log_p_light_blue = lb + blue.value.ln();
    if red.value == 0.0 || blue.value == 0.0 || pu == 0.0 || lp == f64::NEG_INFINITY {
        return Ok(SEstimate {
            estimate: Estimate::exact(0.0),
            log_value: f64::NEG_INFINITY,
            log_num_paths: lp,
            log_p_light_red,
            log_p_light_blue,
            p_uniform,
        });
    }
    let log_value = lp + log_p_light_red + log_p_light_blue + pu.ln();
    let rel = ((red.stderr / red.value).powi(2) + (blue.stderr / blue.value).powi(2) + (p_uniform.stderr / pu).powi(2))
        .sqrt();
    let value = log_value.exp();
    Ok(SEstimate {
        estimate: Estimate { value, stderr: value * rel },
        log_value,
        log_num_paths: lp,
        log_p_light_red,
        log_p_light_blue,
        p_uniform,
    })
}

/// Draw from `Erlang(k, rate)` conditioned on `[lo, hi]` by rejection from uniform.
fn sample_erlang_window<R: Rng + ?Sized>(k: usize, rate: f64, lo: f64, hi: f64, rng: &mut R) -> Option<f64> {
    let lo = lo.max(0.0);
    if hi < lo {
        return None;
    }
    if k == 0 {
        return (lo <= 0.0).then_some(0.0);
    }
    let log_max = erlang_log_pdf(k, rate, ((k as f64 - 1.0) / rate).clamp(lo, hi));
    loop {
        let x = lo + (hi - lo) * rng.random::<f64>();
        if rng.random::<f64>().ln() <= erlang_log_pdf(k, rate, x) - log_max {
            return Some(x);
        }
    }
}

fn sample_uniform_shape<R: Rng + ?Sized>(len: usize, a_unif: f64, rng: &mut R) -> Vec<f64> {
    loop {
        let br = sample_bridge(len, rng);
        if br.max_abs() <= a_unif {
            return br.fractions();
        }
    }
}

/// Path of the exponential model conditioned on being `(a, b, eta)`-light and
/// `A`-uniform; `None` when a lightness window misses the support.
#[allow(clippy::too_many_arguments)]
pub fn sample_light_uniform_path<R: Rng + ?Sized>(
    n: usize,
    ell: usize,
    lambda: f64,
    zeta: f64,
    eta: f64,
    a_unif: f64,
    rng: &mut R,
) -> Option<AlternatingPathSample> {
    let (a, b) = light_centers(lambda, zeta);
    let l = ell as f64;
    let wt_r = sample_erlang_window(ell, lambda, a * l - eta / 2.0, a * l + eta / 2.0, rng)?;
    let bc = b * (l - 1.0);
    let wt_b = sample_erlang_window(ell - 1, 1.0 / n as f64, bc - eta / 2.0, bc + eta / 2.0, rng)?;
    let red: Vec<f64> = sample_uniform_shape(ell, a_unif, rng).into_iter().map(|f| f * wt_r).collect();
    let blue: Vec<f64> = if ell > 1 {
        sample_uniform_shape(ell - 1, a_unif, rng).into_iter().map(|f| f * wt_b).collect()
    } else {
        Vec::new()
    };
    AlternatingPathSample::new(red, blue, true).ok()
}

/// Simple undirected graph stored as sorted adjacency lists.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConflictGraph {
    pub adj: Vec<Vec<usize>>,
}

impl ConflictGraph {
    /// Drops self loops and duplicate edges.
    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let mut adj = vec![Vec::new(); n];
        for (u, v) in edges {
            if u != v {
                adj[u].push(v);
                adj[v].push(u);
            }
        }
        for a in &mut adj {
            a.sort_unstable();
            a.dedup();
        }
        ConflictGraph { adj }
    }

    pub fn vertex_count(&self) -> usize {
        self.adj.len()
    }

    pub fn edge_count(&self) -> usize {
        self.adj.iter().map(Vec::len).sum::<usize>() / 2
    }

    /// `|V|^2 / (2|E| + |V|)`.
    pub fn turan_bound(&self) -> f64 {
        let v = self.vertex_count() as f64;
        if v == 0.0 {
            return 0.0;
        }
        v * v / (2.0 * self.edge_count() as f64 + v)
    }
}

/// Greedy: take a minimum-degree vertex, delete its closed neighborhood, repeat.
pub fn turan_independent_set(g: &ConflictGraph) -> Vec<usize> {
    let n = g.vertex_count();
    let mut deg: Vec<usize> = g.adj.iter().map(Vec::len).collect();
    let mut alive = vec![true; n];
    let mut queue: BTreeSet<(usize, usize)> = (0..n).map(|v| (deg[v], v)).collect();
    let mut chosen = Vec::new();
    while let Some((_, v)) = queue.pop_first() {
        chosen.push(v);
        alive[v] = false;
        for &u in &g.adj[v] {
            if alive[u] {
                alive[u] = false;
                queue.remove(&(deg[u], u));
                for &w in &g.adj[u] {
                    if alive[w] {
                        queue.remove(&(deg[w], w));
                        deg[w] -= 1;
                        queue.insert((deg[w], w));
                    }
                }
            }
        }
    }
    chosen.sort_unstable();
    chosen
}

/// Paths sharing a vertex are adjacent.
pub fn conflict_graph(paths: &[Vec<usize>]) -> ConflictGraph {
    let mut by_vertex: HashMap<usize, Vec<usize>> = HashMap::new();
    for (i, p) in paths.iter().enumerate() {
        let mut vs = p.clone();
        vs.sort_unstable();
        vs.dedup();
        for v in vs {
            by_vertex.entry(v).or_default().push(i);
        }
    }
    let mut edges = Vec::new();
    for owners in by_vertex.values() {
        for (x, &i) in owners.iter().enumerate() {
            for &j in &owners[x + 1..] {
                edges.push((i, j));
            }
        }
    }
    ConflictGraph::from_edges(paths.len(), edges)
}

/// Indices of a pairwise vertex-disjoint subfamily.
pub fn extract_disjoint_paths(paths: &[Vec<usize>]) -> Vec<usize> {
    turan_independent_set(&conflict_graph(paths))
}
