//! Two-stage construction of alternating cycles: two-sided trees on the
//! non-reserved pairs, sprinkling through reserved pairs into a super graph,
//! long cycles in the super graph, and expansion back to the instance.

pub mod cycle;
pub mod dfs;
pub mod graph;
pub mod sprinkle;
pub mod trees;

pub use cycle::{canonical_key, verify_alternating, AlternatingCycle, Color, ColoredEdge, Verification, Vertex};
pub use dfs::{dfs_long_cycle, many_cycles, CycleFamily};
pub use graph::ColoredGraph;
pub use sprinkle::{sprinkle, Hub, SprinkleParams, SprinkleStats, SuperGraph};
pub use trees::{build_trees, tree_budget, Forest, Side, Subtree, TreeMode, TreeNode, TwoSidedTree};

use crate::dist::{bhattacharyya, kl, llr_median, llr_upper_fraction, DistError, DivergenceConfig};
use crate::model::{fmt17, ModelDescriptor, ModelError, ObservedGraph, PlantedInstance};
use crate::rng::substream;
use rand::seq::index::sample;
use std::collections::HashSet;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CycleError {
    #[error("invalid cycle-finder configuration: {0}")]
    InvalidConfig(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("inconsistent super graph: {0}")]
    Corrupt(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Dist(#[from] DistError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    Weighted,
    Unweighted,
}

/// Every tunable of the pipeline.
#[derive(Debug, Clone, PartialEq)]
pub struct CycleConfig {
    pub variant: Variant,
    /// `sqrt(d) B(P, Q) - 1`.
    pub eps: f64,
    /// Reserved fraction of the pairs.
    pub gamma: f64,
    /// Per-hop selection threshold.
    pub zeta: f64,
    pub h: usize,
    pub l: usize,
    /// `-2 log B(P, Q)`.
    pub alpha: f64,
    /// Pairs per subtree; `None` uses the closed-form budget.
    pub budget: Option<usize>,
    /// Vertices per subtree in the unweighted variant.
    pub tree_size: usize,
    /// Required leaf-set size.
    pub s: f64,
    pub tau_red: f64,
    pub tau_blue: f64,
    pub eta: f64,
    /// Upper bound on `2 K1 s eta / n`; surviving trees beyond it are dropped.
    pub kappa_max: f64,
    pub subsets: usize,
    pub window_factor: f64,
    pub seed: u64,
}

const UNWEIGHTED_C7: f64 = 10.0;
const DEFAULT_KAPPA_MAX: f64 = 0.5;
const DEFAULT_BLUE_WEIGHT: f64 = 8.0;

impl CycleConfig {
    /// Defaults derived from the model of `g`.
    pub fn for_graph(g: &ObservedGraph) -> Result<Self, CycleError> {
        let n = g.n as f64;
        let (h, l) = (4usize, 8usize);
        let mut cfg = CycleConfig {
            variant: Variant::Weighted,
            eps: 0.0,
            gamma: 0.0,
            zeta: 0.0,
            h,
            l,
            alpha: 0.0,
            budget: None,
            tree_size: 0,
            s: 0.0,
            tau_red: 0.0,
            tau_blue: 0.0,
            eta: g.d,
            kappa_max: DEFAULT_KAPPA_MAX,
            subsets: 16,
            window_factor: 4.0,
            seed: g.seed,
        };
        let dc = DivergenceConfig::default();
        match &g.model {
            ModelDescriptor::Unweighted => {
                cfg.variant = Variant::Unweighted;
                cfg.eps = g.d.sqrt() - 1.0;
                cfg.gamma = (cfg.eps / 2.0).min(0.5);
                let ell = (UNWEIGHTED_C7 / cfg.eps.powi(5)).ceil();
                cfg.tree_size = (2.0 * ell).min((cfg.gamma * n / 8.0).max(2.0)) as usize;
                cfg.s = cfg.tree_size as f64;
            }
            ModelDescriptor::Exponential { lambda } => {
                let b = 2.0 * (lambda / n).sqrt() / (lambda + 1.0 / n);
                cfg.eps = n.sqrt() * b - 1.0;
                cfg.alpha = -2.0 * b.ln();
                cfg.gamma = cfg.eps / 8.0;
                cfg.zeta = cfg.eps / 32.0;
                cfg.tau_red = (n * lambda).ln();
                cfg.tau_blue = cfg.tau_red - (lambda - 1.0 / n) * DEFAULT_BLUE_WEIGHT;
                cfg.eta = n * (1.0 - (-DEFAULT_BLUE_WEIGHT / n).exp());
            }
            ModelDescriptor::Sparse { .. } | ModelDescriptor::Dense { .. } => {
                let p = g.model.planted_law();
                let q = g.model.unplanted_law(g.n);
                let b = bhattacharyya(&p, &q, &dc)?;
                cfg.eps = g.d.sqrt() * b - 1.0;
                cfg.alpha = -2.0 * b.ln();
                cfg.gamma = cfg.eps / 32.0;
                let j = kl(&p, &q, &dc)? + kl(&q, &p, &dc)?;
                cfg.zeta = (cfg.eps / 32.0).min(j);
                cfg.tau_red = llr_median(&p, &q, &p);
                cfg.tau_blue = llr_median(&p, &q, &q);
                cfg.eta = g.d * llr_upper_fraction(&p, &q, &q, cfg.tau_blue);
            }
        }
        if !(cfg.eps > 0.0) {
            return Err(CycleError::InvalidConfig(format!(
                "sqrt(d)*B = {} <= 1; the pipeline needs sqrt(d)*B > 1",
                fmt17(1.0 + cfg.eps)
            )));
        }
        if cfg.variant == Variant::Weighted {
            cfg.s = (1.0 + 0.75 * cfg.eps).powf(2.0 * (h * l) as f64);
        }
        Ok(cfg)
    }

    /// Sets one parameter from its textual form.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CycleError> {
        let bad = || CycleError::InvalidConfig(format!("cannot parse '{value}' for '{key}'"));
        let f = || value.trim().parse::<f64>().map_err(|_| bad());
        let u = || value.trim().parse::<usize>().map_err(|_| bad());
        match key {
            "eps" => self.eps = f()?,
            "gamma" => self.gamma = f()?,
            "zeta" => self.zeta = f()?,
            "h" => self.h = u()?,
            "l" => self.l = u()?,
            "alpha" => self.alpha = f()?,
            "budget" => self.budget = Some(u()?),
            "tree_size" => self.tree_size = u()?,
            "s" => self.s = f()?,
            "tau_red" => self.tau_red = f()?,
            "tau_blue" => self.tau_blue = f()?,
            "eta" => self.eta = f()?,
            "kappa_max" => self.kappa_max = f()?,
            "subsets" => self.subsets = u()?,
            "window_factor" => self.window_factor = f()?,
            "seed" => self.seed = value.trim().parse().map_err(|_| bad())?,
            _ => return Err(CycleError::InvalidConfig(format!("unknown parameter '{key}'"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), CycleError> {
        let err = |m: String| Err(CycleError::InvalidConfig(m));
        if !(self.gamma > 0.0 && self.gamma <= 0.5) {
            return err(format!("gamma = {} must lie in (0, 1/2]", self.gamma));
        }
        if !(self.kappa_max > 0.0) || !(self.eta > 0.0) || !(self.window_factor > 0.0) {
            return err("kappa_max, eta and window_factor must be positive".into());
        }
        if !self.tau_red.is_finite() || !self.tau_blue.is_finite() {
            return err("tau_red and tau_blue must be finite".into());
        }
        match self.variant {
            Variant::Unweighted => {
                if self.tree_size == 0 {
                    return err("tree_size must be positive".into());
                }
            }
            Variant::Weighted => {
                if self.h == 0 || self.l == 0 {
                    return err("h and l must be positive".into());
                }
                if !(self.zeta > 0.0) || !(self.s >= 1.0) {
                    return err(format!("zeta = {} must be positive and s = {} at least 1", self.zeta, self.s));
                }
                let ell = (4 * self.h * self.l) as f64;
                let need = 12.0 * (self.tau_red - self.tau_blue);
                if self.zeta * ell < need {
                    return err(format!(
                        "zeta * 4HL = {} is below 12 (tau_red - tau_blue) = {}",
                        fmt17(self.zeta * ell),
                        fmt17(need)
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn tree_mode(&self, n: usize) -> TreeMode {
        match self.variant {
            Variant::Unweighted => TreeMode::Unweighted { size: self.tree_size },
            Variant::Weighted => {
                let budget = self
                    .budget
                    .unwrap_or_else(|| tree_budget(n, self.gamma, self.h, self.l, self.eps, self.alpha));
                TreeMode::Weighted { h: self.h, l: self.l, zeta: self.zeta, budget }
            }
        }
    }

    pub fn sprinkle_params(&self) -> SprinkleParams {
        SprinkleParams { tau_red: self.tau_red, tau_blue: self.tau_blue, s: self.s, eta: self.eta }
    }
}

/// `floor(gamma n)` pairs chosen uniformly, sorted.
pub fn reserve(n: usize, gamma: f64, seed: u64) -> Vec<usize> {
    let size = ((gamma * n as f64).floor() as usize).min(n);
    let mut rng = substream(seed, "cyclefinder-reserved");
    let mut v = sample(&mut rng, n, size).into_vec();
    v.sort_unstable();
    v
}

/// Trees whose leaf sets reach `s` (exactly `tree_size` when unweighted) and,
/// when weighted, whose central red edge has llr at most `tau_red`; truncated
/// so that `2 K1 s eta / n <= kappa_max`.
pub fn select_k1(forest: &Forest, g: &ColoredGraph, cfg: &CycleConfig) -> Vec<usize> {
    let cap = (cfg.kappa_max * g.n() as f64 / (2.0 * cfg.s * cfg.eta)).floor().max(0.0) as usize;
    forest
        .trees
        .iter()
        .enumerate()
        .filter(|(_, t)| match cfg.variant {
            Variant::Unweighted => t.left.leaves.len() == cfg.tree_size && t.right.leaves.len() == cfg.tree_size,
            Variant::Weighted => {
                t.left.leaves.len() as f64 >= cfg.s
                    && t.right.leaves.len() as f64 >= cfg.s
                    && g.red_llr(t.root) <= cfg.tau_red
            }
        })
        .map(|(k, _)| k)
        .take(cap)
        .collect()
}

/// An expanded cycle with its excess weight assembled from tree sums and
/// stitching edges.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpandedCycle {
    pub cycle: AlternatingCycle,
    pub incremental_delta: f64,
}

/// Replaces each super vertex of `super_cycle` by the tree path between the
/// leaves witnessing its hubs, joined by the stitching blue edges.
pub fn expand_cycle(
    super_cycle: &[usize],
    sg: &SuperGraph,
    trees: &[TwoSidedTree],
    g: &ColoredGraph,
) -> Result<ExpandedCycle, CycleError> {
    let r = super_cycle.len();
    if r < 2 {
        return Err(CycleError::Precondition(format!("super cycle with {r} red edge(s) is not alternating")));
    }
    let mut stitches = Vec::with_capacity(r);
    for a in 0..r {
        let (x, y) = (super_cycle[a], super_cycle[(a + 1) % r]);
        let w = sg
            .witness(x, y)
            .ok_or_else(|| CycleError::Corrupt(format!("no blue super edge {x} -> {y}'")))?;
        stitches.push(w);
    }
    let blue = |i: usize, j: usize| {
        g.blue_llr(i, j).ok_or_else(|| CycleError::Corrupt(format!("missing blue edge {i}-{j}'")))
    };
    let mut pairs = Vec::new();
    let mut delta = 0.0;
    for a in 0..r {
        let sv = super_cycle[a];
        let tree = &trees[sg.members[sv]];
        let v = stitches[(a + r - 1) % r].1;
        let u = stitches[a].0;
        let hub_v = sg.hubs_v[sv]
            .iter()
            .find(|h| h.pair == v)
            .ok_or_else(|| CycleError::Corrupt(format!("pair {v} is not a V-hub of {sv}")))?;
        let hub_u = sg.hubs_u[sv]
            .iter()
            .find(|h| h.pair == u)
            .ok_or_else(|| CycleError::Corrupt(format!("pair {u} is not a U-hub of {sv}")))?;
        let path = tree.path_pairs(hub_v.leaf, hub_u.leaf);
        delta += tree.path_delta(hub_v.leaf, hub_u.leaf, g);
        delta += blue(v, tree.right.vertex(hub_v.leaf, g))?;
        delta += blue(tree.left.vertex(hub_u.leaf, g), g.partner(u))?;
        delta += blue(u, g.partner(stitches[a].1))?;
        delta -= g.red_llr(v) + g.red_llr(u);
        pairs.push(v);
        pairs.extend(path);
        pairs.push(u);
    }
    let cycle = AlternatingCycle::from_pairs(pairs, g).map_err(CycleError::Corrupt)?;
    Ok(ExpandedCycle { cycle, incremental_delta: delta })
}

/// Everything a pipeline run produced.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineReport {
    pub n: usize,
    pub reserved: usize,
    pub trees: usize,
    pub planned_trees: usize,
    pub budget: usize,
    pub exhausted: bool,
    pub stats: SprinkleStats,
    pub subsets: usize,
    pub super_cycles: usize,
    pub cycles: Vec<ExpandedCycle>,
}

impl PipelineReport {
    /// One `len= delta= key=` line per cycle followed by the realized parameters.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for c in &self.cycles {
            out.push_str(&c.cycle.summary_line());
            out.push('\n');
        }
        let s = &self.stats;
        out.push_str(&format!(
            "# trees={} planned={} budget={} exhausted={} K1={} K2={} beta={} b={} kappa={} eta={} d_super={} super_degree={} subsets={} cycles={}\n",
            self.trees,
            self.planned_trees,
            self.budget,
            self.exhausted,
            s.k1,
            s.k2,
            fmt17(s.beta),
            fmt17(s.b),
            fmt17(s.kappa),
            fmt17(s.eta),
            fmt17(s.d_super),
            fmt17(s.realized_degree),
            self.subsets,
            self.cycles.len()
        ));
        out
    }
}

/// Runs the full pipeline on a planted instance.
pub fn run_pipeline(inst: &PlantedInstance, cfg: &CycleConfig) -> Result<PipelineReport, CycleError> {
    cfg.validate()?;
    let g = ColoredGraph::from_instance(inst);
    run_on_graph(&g, cfg)
}

pub fn run_on_graph(g: &ColoredGraph, cfg: &CycleConfig) -> Result<PipelineReport, CycleError> {
    cfg.validate()?;
    let n = g.n();
    let reserved = reserve(n, cfg.gamma, cfg.seed);
    let forest = build_trees(g, &reserved, cfg.gamma, cfg.tree_mode(n));
    debug_assert!(forest.check_disjoint(n, &reserved).is_ok());
    let k1 = select_k1(&forest, g, cfg);
    let sg = sprinkle(g, &forest.trees, &k1, &reserved, cfg.sprinkle_params());
    let family = many_cycles(&sg.adj, cfg.subsets, cfg.window_factor, crate::rng::stable_hash(&[cfg.seed, 0x5eed]));
    let mut keys = HashSet::new();
    let mut cycles = Vec::new();
    for c in &family.cycles {
        let e = expand_cycle(c, &sg, &forest.trees, g)?;
        if keys.insert(e.cycle.key()) {
            cycles.push(e);
        }
    }
    Ok(PipelineReport {
        n,
        reserved: reserved.len(),
        trees: forest.trees.len(),
        planned_trees: forest.planned,
        budget: forest.budget,
        exhausted: forest.exhausted,
        stats: sg.stats,
        subsets: family.subsets,
        super_cycles: family.cycles.len(),
        cycles,
    })
}
