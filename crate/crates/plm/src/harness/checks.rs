//! Property checks with measured margins. Every check emits rows
//! `check, case, measured, limit, passed`.

use super::config::{ExperimentConfig, ExperimentKind};
use super::experiments::{build_instance, trial_seed, ExperimentOutput};
use super::pool::run_pool;
use super::table::{Cell, Table};
use super::HarnessError;
use crate::dist::{ld_tail_bound, llr, DivergenceConfig, WeightDistribution};
use crate::matching::{build_llr, mle, objective};
use crate::paths::{bridge_range_prob, erlang_chernoff, sample_bridge, turan_independent_set, ConflictGraph};
use crate::posterior::{
    count_matchings_at_distance, excess_weight, exhaustive_posterior_llr, for_each_permutation, symmetric_difference,
};
use crate::rng::{from_seed, hash_str, stable_hash};
use rand::Rng;
use rand_distr::{Distribution, Exp1};
use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheckName {
    Ld,
    Erlang,
    Bridge,
    Turan,
    PosteriorOracle,
    PosteriorConsistency,
    MatchingCount,
}

impl CheckName {
    pub const ALL: [CheckName; 7] = [
        CheckName::Ld,
        CheckName::Erlang,
        CheckName::Bridge,
        CheckName::Turan,
        CheckName::PosteriorOracle,
        CheckName::PosteriorConsistency,
        CheckName::MatchingCount,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            CheckName::Ld => "ld_check",
            CheckName::Erlang => "erlang_check",
            CheckName::Bridge => "bridge_check",
            CheckName::Turan => "turan_check",
            CheckName::PosteriorOracle => "posterior_oracle",
            CheckName::PosteriorConsistency => "posterior_consistency",
            CheckName::MatchingCount => "matching_count",
        }
    }
}

impl fmt::Display for CheckName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CheckName {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim().to_ascii_lowercase();
        CheckName::ALL
            .into_iter()
            .find(|c| c.as_str() == t || c.as_str().strip_suffix("_check") == Some(t.as_str()))
            .ok_or_else(|| HarnessError::Config(format!("unknown check '{s}'")))
    }
}

/// Rows of all executed checks.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckReport {
    pub table: Table,
    pub passed: bool,
}

impl CheckReport {
    pub fn empty() -> Self {
        CheckReport { table: Table::new(&["check", "case", "measured", "limit", "passed"]), passed: true }
    }

    fn add(&mut self, check: &str, case: String, measured: f64, limit: f64, ok: bool) {
        self.passed &= ok;
        self.table.push(vec![check.into(), case.into(), measured.into(), limit.into(), ok.into()]);
    }

    pub fn merge(&mut self, other: CheckReport) {
        self.passed &= other.passed;
        self.table.rows.extend(other.table.rows);
    }

    /// Rows whose `passed` column is false.
    pub fn failures(&self) -> Vec<&Vec<Cell>> {
        self.table.rows.iter().filter(|r| r[4] == Cell::from(false)).collect()
    }
}

fn case_rng(seed: u64, case: &str) -> crate::rng::PlmRng {
    from_seed(stable_hash(&[seed, hash_str(case)]))
}

/// Monte Carlo `P(sum_i (Y_i - X_i) >= x l)` with `X_i = llr(W ~ Exp(lambda))`
/// and `Y_i = llr(W ~ Exp(1))`, against `exp(-l (alpha + x/2))` plus three
/// binomial standard errors.
pub fn ld_check(lambdas: &[f64], ells: &[u32], xs: &[f64], samples: usize, seed: u64, workers: usize) -> CheckReport {
    let mut cases = Vec::new();
    for &l in lambdas {
        for &e in ells {
            for &x in xs {
                cases.push((l, e, x));
            }
        }
    }
    let rows = run_pool(&cases, workers, |&(lambda, ell, x)| {
        let case = format!("lambda={lambda} ell={ell} x={x}");
        let p = WeightDistribution::Exponential { rate: lambda };
        let q = WeightDistribution::Exponential { rate: 1.0 };
        let mut rng = case_rng(seed, &case);
        let mut hits = 0usize;
        for _ in 0..samples {
            let mut s = 0.0;
            for _ in 0..ell {
                s += llr(&p, &q, Some(q.sample(&mut rng))) - llr(&p, &q, Some(p.sample(&mut rng)));
            }
            hits += (s >= x * ell as f64) as usize;
        }
        let emp = hits as f64 / samples as f64;
        let se = (emp * (1.0 - emp) / samples as f64).sqrt();
        let bound = ld_tail_bound(&p, &q, x, ell, &DivergenceConfig::default()).unwrap_or(f64::NAN);
        let limit = bound + 3.0 * se;
        (case, emp, limit, emp <= limit)
    });
    let mut r = CheckReport::empty();
    for (case, m, l, ok) in rows {
        r.add("ld_check", case, m, l, ok);
    }
    r
}

/// Both Chernoff tails of a sum of `n` standard exponentials.
pub fn erlang_check(n: usize, xis: &[f64], samples: usize, seed: u64, workers: usize) -> CheckReport {
    let rows = run_pool(xis, workers, |&xi| {
        let case = format!("n={n} xi={xi} tail={}", if xi > 1.0 { "upper" } else { "lower" });
        let mut rng = case_rng(seed, &case);
        let t = xi * n as f64;
        let mut hits = 0usize;
        for _ in 0..samples {
            let s: f64 = (0..n).map(|_| -> f64 { Exp1.sample(&mut rng) }).sum();
            hits += if xi > 1.0 { s >= t } else { s <= t } as usize;
        }
        let emp = hits as f64 / samples as f64;
        let bound = erlang_chernoff(n, xi);
        (case, emp, bound, emp <= bound)
    });
    let mut r = CheckReport::empty();
    for (case, m, l, ok) in rows {
        r.add("erlang_check", case, m, l, ok);
    }
    r
}

/// Bridge endpoint, independence of range and total at `corr_ell`, and
/// `P(max |R| <= a)` decreasing along `ells` with 3-sigma separation.
pub fn bridge_check(corr_ell: usize, ells: &[usize], a_unif: f64, samples: usize, seed: u64) -> CheckReport {
    let mut r = CheckReport::empty();
    let mut rng = case_rng(seed, "bridge");
    let (mut xs, mut ys) = (Vec::with_capacity(samples), Vec::with_capacity(samples));
    let mut worst_end: f64 = 0.0;
    for _ in 0..samples {
        let b = sample_bridge(corr_ell, &mut rng);
        worst_end = worst_end.max(b.r[corr_ell].abs()).max(b.r[0].abs());
        xs.push(b.total);
        ys.push(b.max_abs());
    }
    r.add("bridge_check", format!("endpoint ell={corr_ell}"), worst_end, 1e-12, worst_end <= 1e-12);
    let corr = correlation(&xs, &ys);
    r.add("bridge_check", format!("corr(total,range) ell={corr_ell}"), corr.abs(), 0.01, corr.abs() < 0.01);
    let probs: Vec<_> = ells.iter().map(|&l| (l, bridge_range_prob(l, a_unif, samples, &mut rng))).collect();
    for w in probs.windows(2) {
        let ((l0, p0), (l1, p1)) = (w[0], w[1]);
        let sep = 3.0 * (p0.stderr.powi(2) + p1.stderr.powi(2)).sqrt();
        r.add(
            "bridge_check",
            format!("P(range<={a_unif}) ell={l0} vs {l1}"),
            p0.value - p1.value,
            sep,
            p0.value - p1.value > sep,
        );
    }
    r
}

fn correlation(xs: &[f64], ys: &[f64]) -> f64 {
    let k = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / k, ys.iter().sum::<f64>() / k);
    let cov: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let vx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let vy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    cov / (vx * vy).sqrt()
}

/// Greedy independent sets on random graphs: independence and the bound
/// `|V|^2 / (2|E| + |V|)`.
pub fn turan_check(graphs: usize, seed: u64) -> CheckReport {
    let mut rng = case_rng(seed, "turan");
    let mut violations = 0usize;
    let mut worst_ratio = f64::INFINITY;
    for _ in 0..graphs {
        let v = rng.random_range(1..80usize);
        let p: f64 = rng.random::<f64>();
        let mut edges = Vec::new();
        for a in 0..v {
            for b in a + 1..v {
                if rng.random::<f64>() < p {
                    edges.push((a, b));
                }
            }
        }
        let g = ConflictGraph::from_edges(v, edges);
        let set = turan_independent_set(&g);
        let independent = set.iter().all(|&a| set.iter().all(|b| g.adj[a].binary_search(b).is_err()));
        let bound = g.turan_bound();
        worst_ratio = worst_ratio.min(set.len() as f64 / bound);
        violations += (!independent || (set.len() as f64) < bound) as usize;
    }
    let mut r = CheckReport::empty();
    r.add("turan_check", format!("graphs={graphs} violations"), violations as f64, 0.0, violations == 0);
    r.add("turan_check", format!("graphs={graphs} min size/bound"), worst_ratio, 1.0, worst_ratio >= 1.0);
    r
}

/// MLE objective equals the exhaustive maximum on small instances.
pub fn posterior_oracle(model: &str, n: usize, param: f64, instances: usize, seed: u64, workers: usize) -> CheckReport {
    let ids: Vec<usize> = (0..instances).collect();
    let diffs = run_pool(&ids, workers, |&t| -> Result<f64, HarnessError> {
        let inst = build_instance(model, n, param, trial_seed(seed, n, param, t))?;
        let llr = build_llr(&inst);
        let m = mle(&llr)?;
        let table = exhaustive_posterior_llr(&llr)?;
        let best = table.entries.iter().map(|e| e.1).fold(f64::NEG_INFINITY, f64::max);
        Ok((objective(&llr, &m) - best).abs())
    });
    let mut worst: f64 = 0.0;
    let mut failures = 0usize;
    for d in diffs {
        match d {
            Ok(d) => worst = worst.max(d),
            Err(_) => failures += 1,
        }
    }
    let mut r = CheckReport::empty();
    let case = format!("{model} n={n} param={param} instances={instances} failures={failures}");
    r.add("posterior_oracle", case, worst, 1e-9, failures == 0 && worst <= 1e-9);
    r
}

/// `exp(Delta(m xor m*)) = mu(m) / mu(m*)` for every matching, and total mass one.
pub fn posterior_consistency(
    model: &str,
    n: usize,
    param: f64,
    instances: usize,
    seed: u64,
    workers: usize,
) -> CheckReport {
    let ids: Vec<usize> = (0..instances).collect();
    let res = run_pool(&ids, workers, |&t| -> Result<(f64, f64), HarnessError> {
        let inst = build_instance(model, n, param, trial_seed(seed, n, param, t))?;
        let llr = build_llr(&inst);
        let table = exhaustive_posterior_llr(&llr)?;
        let base = table.log_mass_of(&inst.planted);
        let mut worst: f64 = 0.0;
        for (k, (m, _)) in table.entries.iter().enumerate() {
            let delta = excess_weight(&symmetric_difference(m, &inst.planted), &llr, &inst.planted);
            worst = worst.max((delta - (table.log_mass(k) - base)).exp_m1().abs());
        }
        let total: f64 = (0..table.entries.len()).map(|k| table.mass(k)).sum();
        Ok((worst, (total - 1.0).abs()))
    });
    let (mut ratio, mut mass, mut failures) = (0.0f64, 0.0f64, 0usize);
    for x in res {
        match x {
            Ok((a, b)) => {
                ratio = ratio.max(a);
                mass = mass.max(b);
            }
            Err(_) => failures += 1,
        }
    }
    let mut r = CheckReport::empty();
    let case = format!("{model} n={n} param={param} instances={instances} failures={failures}");
    r.add("posterior_consistency", format!("{case} ratio"), ratio, 1e-9, failures == 0 && ratio <= 1e-9);
    r.add("posterior_consistency", format!("{case} total mass"), mass, 1e-9, failures == 0 && mass <= 1e-9);
    r
}

/// Closed-form matching counts against brute force at `brute_n`, and row sums `n!`.
pub fn matching_count_check(brute_n: usize, max_n: u64) -> CheckReport {
    let mut counts = vec![0u128; brute_n + 1];
    for_each_permutation(brute_n, |p| {
        counts[p.iter().enumerate().filter(|(i, &j)| *i != j).count()] += 1;
    });
    let mismatched = (0..=brute_n).filter(|&l| counts[l] != count_matchings_at_distance(brute_n as u64, l as u64)).count();
    let mut r = CheckReport::empty();
    r.add("matching_count", format!("brute force n={brute_n}"), mismatched as f64, 0.0, mismatched == 0);
    let mut bad = 0usize;
    for n in 1..=max_n {
        let sum: u128 = (0..=n).map(|l| count_matchings_at_distance(n, l)).sum();
        bad += (sum != (1..=n as u128).product::<u128>()) as usize;
    }
    r.add("matching_count", format!("row sums n<={max_n}"), bad as f64, 0.0, bad == 0);
    r
}

/// Models used by the small-instance oracles, with their parameters.
pub const ORACLE_MODELS: [(&str, f64); 4] =
    [("exponential", 2.0), ("sparse(exp:2,exp:1)", 3.0), ("dense(exp:1,unif:0:1)", 0.0), ("unweighted", 2.0)];

/// Runs the named checks at their default sizes.
pub fn run_checks(names: &[CheckName], seed: u64, workers: usize) -> CheckReport {
    let mut r = CheckReport::empty();
    for &name in names {
        let part = match name {
            CheckName::Ld => ld_check(&[2.0, 3.0], &[5, 20], &[0.0, 0.2], 1_000_000, seed, workers),
            CheckName::Erlang => erlang_check(50, &[0.5, 1.5], 1_000_000, seed, workers),
            CheckName::Bridge => bridge_check(50, &[100, 400], 4.0, 100_000, seed),
            CheckName::Turan => turan_check(1000, seed),
            CheckName::PosteriorOracle => {
                let mut acc = CheckReport::empty();
                for (m, p) in ORACLE_MODELS {
                    acc.merge(posterior_oracle(m, 7, p, 100, seed, workers));
                }
                acc
            }
            CheckName::PosteriorConsistency => {
                let mut acc = CheckReport::empty();
                for (m, p) in ORACLE_MODELS {
                    acc.merge(posterior_consistency(m, 5, p, 20, seed, workers));
                }
                acc
            }
            CheckName::MatchingCount => matching_count_check(6, 10),
        };
        r.merge(part);
    }
    r
}

/// Config-driven checks for the `ld_check`, `bridge_check` and
/// `posterior_oracle` experiment kinds.
pub fn run_kind(cfg: &ExperimentConfig, workers: usize) -> Result<ExperimentOutput, HarnessError> {
    cfg.validate()?;
    let list = |key: &str, default: &str| -> Result<Vec<f64>, HarnessError> {
        let v: String = cfg.option(key, default.to_string())?;
        v.split(',')
            .map(|s| s.trim().parse::<f64>().map_err(|_| HarnessError::Config(format!("option {key}: '{s}'"))))
            .collect()
    };
    let samples: usize = cfg.option("samples", 1_000_000usize)?;
    let report = match cfg.kind {
        ExperimentKind::LdCheck => {
            let ells: Vec<u32> = list("ells", "5,20")?.into_iter().map(|e| e as u32).collect();
            ld_check(&cfg.param, &ells, &list("xs", "0,0.2")?, samples, cfg.seed, workers)
        }
        ExperimentKind::BridgeCheck => {
            let ells: Vec<usize> = cfg.param.iter().map(|&p| p as usize).collect();
            let corr_ell: usize = cfg.option("corr_ell", 50usize)?;
            bridge_check(corr_ell, &ells, cfg.option("a", 4.0f64)?, samples, cfg.seed)
        }
        ExperimentKind::PosteriorOracle => {
            let mut acc = CheckReport::empty();
            for &n in &cfg.n {
                for &p in &cfg.param {
                    acc.merge(posterior_oracle(&cfg.model, n, p, cfg.trials, cfg.seed, workers));
                    acc.merge(posterior_consistency(&cfg.model, n.min(6), p, cfg.trials, cfg.seed, workers));
                }
            }
            acc
        }
        k => return Err(HarnessError::Config(format!("{k} is not a check kind"))),
    };
    Ok(ExperimentOutput { table: report.table, passed: report.passed })
}
