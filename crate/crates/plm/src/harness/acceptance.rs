//! The acceptance suite: sixteen criteria, each reported as one pass/fail line.

use super::checks::{
    bridge_check, erlang_check, ld_check, matching_count_check, posterior_consistency, posterior_oracle, turan_check,
    CheckReport, ORACLE_MODELS,
};
use super::config::{ExperimentConfig, ExperimentKind};
use super::experiments::{cycle_checks, run_cyclefind_demo, run_mle_vs_ode, run_phase_diagram};
use super::table::{Cell, Table};
use super::HarnessError;
use crate::asymptotics::{asymptotic_error, OdeControls};
use crate::cyclefinder::{dfs_long_cycle, run_pipeline, AlternatingCycle, ColoredGraph, CycleConfig};
use crate::dist::{bhattacharyya_numeric, exponential_threshold_rate, DivergenceConfig, WeightDistribution};
use crate::model::{fmt17, generate_sparse, generate_unweighted};
use crate::paths::{bridge_range_prob, estimate_expected_s, first_moment_bound, linear_fit};
use crate::rng::{from_seed, stable_hash, substream};
use rand::Rng;
use std::time::Instant;

/// Outcome of one criterion.
#[derive(Debug, Clone, PartialEq)]
pub struct Criterion {
    pub id: usize,
    pub title: &'static str,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

impl Criterion {
    pub fn line(&self) -> String {
        format!(
            "criterion {:02} {} {} ({:.1}s): {}",
            self.id,
            if self.passed { "PASS" } else { "FAIL" },
            self.title,
            self.seconds,
            self.detail
        )
    }
}

pub const TITLES: [&str; 16] = [
    "Bhattacharyya closed form",
    "exponential threshold",
    "unweighted threshold direction",
    "finite n against the ODE limit",
    "infinite-order scaling",
    "assignment solver against enumeration",
    "posterior consistency",
    "large-deviation dominance",
    "Erlang Chernoff dominance",
    "bridge properties",
    "DFS long cycle",
    "end-to-end cycle pipeline",
    "Turan bound",
    "matching-count formula",
    "first-moment consistency",
    "determinism across worker counts",
];

fn col(t: &Table, name: &str) -> usize {
    t.header.iter().position(|h| h == name).expect("known column")
}

fn float(c: &Cell) -> f64 {
    match c {
        Cell::Float(v) => *v,
        Cell::Int(v) => *v as f64,
        Cell::Text(s) => s.parse().unwrap_or(f64::NAN),
    }
}

fn report_detail(r: &CheckReport) -> String {
    let worst = r.failures();
    if worst.is_empty() {
        format!("{} rows within limits", r.table.rows.len())
    } else {
        let rows: Vec<String> = worst
            .iter()
            .map(|w| format!("{}: {} vs limit {}", float_text(&w[1]), fmt17(float(&w[2])), fmt17(float(&w[3]))))
            .collect();
        format!("failing rows: {}", rows.join("; "))
    }
}

fn float_text(c: &Cell) -> String {
    match c {
        Cell::Text(s) => s.clone(),
        other => fmt17(float(other)),
    }
}

fn c1() -> Result<(bool, String), HarnessError> {
    let grid = [0.05, 0.1, 0.25, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 50.0];
    let cfg = DivergenceConfig::default();
    let mut worst: f64 = 0.0;
    for &a in &grid {
        for &b in &grid {
            let p = WeightDistribution::Exponential { rate: a };
            let q = WeightDistribution::Exponential { rate: b };
            let exact = 2.0 * (a * b).sqrt() / (a + b);
            worst = worst.max((bhattacharyya_numeric(&p, &q, &cfg)? - exact).abs());
        }
    }
    Ok((worst < 1e-8, format!("max |quadrature - closed form| = {} over 10x10 grid", fmt17(worst))))
}

fn c2() -> Result<(bool, String), HarnessError> {
    let r = exponential_threshold_rate(1_000_000, &DivergenceConfig::default())?;
    Ok(((r - 4.0).abs() < 1e-2, format!("root at n = 1e6: lambda = {}", fmt17(r))))
}

fn c3(seed: u64, workers: usize) -> Result<(bool, String), HarnessError> {
    let mut cfg = ExperimentConfig::new(ExperimentKind::PhaseDiagram, "unweighted");
    cfg.n = vec![500, 2000, 8000];
    cfg.param = vec![0.8, 1.5];
    cfg.trials = 50;
    cfg.seed = seed;
    let t = run_phase_diagram(&cfg, workers)?;
    let (cn, cp, cm) = (col(&t, "n"), col(&t, "param"), col(&t, "mean_error"));
    let series = |d: f64| -> Vec<(f64, f64)> {
        t.rows.iter().filter(|r| float(&r[cp]) == d).map(|r| (float(&r[cn]), float(&r[cm]))).collect()
    };
    let low = series(0.8);
    let high = series(1.5);
    let decreasing = low.windows(2).all(|w| w[1].1 < w[0].1);
    let above = high.iter().all(|p| p.1 > 0.01);
    let fmt = |s: &[(f64, f64)]| s.iter().map(|p| format!("n={}:{:.5}", p.0, p.1)).collect::<Vec<_>>().join(" ");
    Ok((decreasing && above, format!("d=0.8 [{}]; d=1.5 [{}]", fmt(&low), fmt(&high))))
}

fn c4(seed: u64, workers: usize) -> Result<(bool, String), HarnessError> {
    let ctl = OdeControls::default();
    let e = asymptotic_error(2.0, &ctl)?;
    let e_half = asymptotic_error(2.0, &ctl.halved())?;
    let converged = (e - e_half).abs() / e < 1e-6;
    let mut cfg = ExperimentConfig::new(ExperimentKind::MleVsOde, "exponential");
    cfg.n = vec![500, 1000, 2000];
    cfg.param = vec![2.0];
    cfg.trials = 50;
    cfg.seed = seed;
    let t = run_mle_vs_ode(&cfg, workers)?;
    let (cn, cm, cg) = (col(&t, "n"), col(&t, "mean_error"), col(&t, "rel_gap"));
    let gaps: Vec<f64> = t.rows.iter().map(|r| float(&r[cg])).collect();
    let monotone = gaps.windows(2).all(|w| w[1] < w[0]);
    let last = *gaps.last().expect("three rows");
    let rows: Vec<String> = t
        .rows
        .iter()
        .map(|r| format!("n={}: mean {:.5} gap {:.4}", float(&r[cn]), float(&r[cm]), float(&r[cg])))
        .collect();
    Ok((
        converged && monotone && last < 0.2,
        format!("ODE error(2) = {} (halved tol diff {:.2e}); {}", fmt17(e), (e - e_half).abs() / e, rows.join(", ")),
    ))
}

fn c5() -> Result<(bool, String), HarnessError> {
    let ctl = OdeControls::default();
    let mut xy = Vec::new();
    for eps in [1.0f64, 0.5, 0.25] {
        xy.push((1.0 / eps.sqrt(), asymptotic_error(4.0 - eps, &ctl)?.ln()));
    }
    let (slope, _, _) = linear_fit(&xy);
    let target = -2.0 * std::f64::consts::PI;
    let rel = ((slope - target) / target).abs();
    Ok((rel < 0.25, format!("slope {} vs -2 pi (relative deviation {:.4})", fmt17(slope), rel)))
}

fn c6(seed: u64, workers: usize) -> (bool, String) {
    let mut r = CheckReport::empty();
    for (m, p) in ORACLE_MODELS {
        r.merge(posterior_oracle(m, 7, p, 100, seed, workers));
    }
    (r.passed, format!("4 models x 100 instances at n = 7: {}", report_detail(&r)))
}

fn c7(seed: u64, workers: usize) -> (bool, String) {
    let mut r = CheckReport::empty();
    for (m, p) in ORACLE_MODELS {
        r.merge(posterior_consistency(m, 5, p, 20, seed, workers));
    }
    let worst = r.table.rows.iter().map(|row| float(&row[2])).fold(0.0, f64::max);
    (r.passed, format!("4 models x 20 instances at n = 5, worst deviation {}; {}", fmt17(worst), report_detail(&r)))
}

fn c11(seed: u64) -> (bool, String) {
    let (n, d) = (1000usize, 900.0);
    let mut ok = 0;
    let mut shortest = usize::MAX;
    for s in 0..20u64 {
        let mut rng = from_seed(stable_hash(&[seed, 11, s]));
        let mut blue = Vec::new();
        let adj: Vec<Vec<usize>> = (0..n)
            .map(|i| {
                let row: Vec<usize> = (0..n).filter(|&j| j != i && rng.random::<f64>() < d / n as f64).collect();
                blue.extend(row.iter().map(|&j| (i, j)));
                row
            })
            .collect();
        let all: Vec<usize> = (0..n).collect();
        let g = ColoredGraph::unweighted(n, &blue);
        let found = dfs_long_cycle(&adj, &all, 4.0).and_then(|c| AlternatingCycle::from_pairs(c, &g).ok());
        let len = found.map(|c| c.len()).unwrap_or(0);
        shortest = shortest.min(len);
        ok += (4 * len >= 3 * n) as usize;
    }
    (ok == 20, format!("{ok}/20 runs with a verified cycle of length >= 3n/4 = 750; shortest {shortest}"))
}

fn weighted_runs(
    sqrt_db: f64,
    n: usize,
    seeds: u64,
    overrides: &[(&str, &str)],
    base_seed: u64,
) -> Result<(bool, usize, f64), HarnessError> {
    let p = WeightDistribution::Exponential { rate: 1.2 };
    let q = WeightDistribution::Exponential { rate: 1.0 };
    let b = 2.0 * 1.2f64.sqrt() / 2.2;
    let d = (sqrt_db / b).powi(2);
    let mut all_positive = true;
    let mut count = 0;
    let mut min_delta = f64::INFINITY;
    for s in 0..seeds {
        let inst = generate_sparse(n, d, &p, &q, stable_hash(&[base_seed, 12, s]))?;
        let mut cfg = CycleConfig::for_graph(&inst.graph)?;
        for (k, v) in overrides {
            cfg.set(k, v)?;
        }
        let r = run_pipeline(&inst, &cfg)?;
        all_positive &= cycle_checks(&inst, &cfg, &r);
        count += r.cycles.len();
        min_delta = r.cycles.iter().map(|c| c.cycle.delta()).fold(min_delta, f64::min);
    }
    Ok((all_positive, count, min_delta))
}

/// Settings of the weighted runs: the threshold-1.3 run and a supplementary
/// run at 3.0 where the pipeline returns cycles at this scale.
pub const WEIGHTED_13: [(&str, &str); 5] =
    [("gamma", "0.15"), ("h", "8"), ("l", "2"), ("budget", "3000"), ("s", "20")];
pub const WEIGHTED_30: [(&str, &str); 5] =
    [("gamma", "0.3"), ("h", "4"), ("l", "1"), ("budget", "1500"), ("s", "100")];

fn c12(seed: u64) -> Result<(bool, String), HarnessError> {
    let n = 20_000;
    let mut good_runs = 0;
    let mut all_valid = true;
    let mut total = 0;
    let mut longest = 0;
    for s in 0..10u64 {
        let inst = generate_unweighted(n, 4.0, stable_hash(&[seed, 12, s]))?;
        let cfg = CycleConfig::for_graph(&inst.graph)?;
        let r = run_pipeline(&inst, &cfg)?;
        let valid = cycle_checks(&inst, &cfg, &r);
        all_valid &= valid;
        total += r.cycles.len();
        let max_len = r.cycles.iter().map(|c| c.cycle.len()).max().unwrap_or(0);
        longest = longest.max(max_len);
        good_runs += (valid && max_len * 1000 >= n) as usize;
    }
    let (w13_ok, w13_count, w13_min) = weighted_runs(1.3, 2_000_000, 3, &WEIGHTED_13, seed)?;
    let (w30_ok, w30_count, w30_min) = weighted_runs(3.0, 1_000_000, 3, &WEIGHTED_30, seed)?;
    let passed = good_runs >= 8 && all_valid && w13_ok && w30_ok && w30_count > 0;
    Ok((
        passed,
        format!(
            "unweighted: {good_runs}/10 runs with a verified cycle of length >= {}, {total} cycles, longest {longest}; \
             weighted sqrt(d)B=1.3 (n=2e6, 3 seeds): {w13_count} cycles returned, all positive: {w13_ok}{}{}; \
             weighted sqrt(d)B=3.0 (n=1e6, 3 seeds): {w30_count} cycles, min delta {}",
            n / 1000,
            if w13_count == 0 { " (vacuous)" } else { "" },
            if w13_count > 0 { format!(", min delta {}", fmt17(w13_min)) } else { String::new() },
            fmt17(w30_min)
        ),
    ))
}

fn c15(seed: u64) -> Result<(bool, String), HarnessError> {
    let mut rng = substream(seed, "first-moment");
    let lambda = 3.5;
    let eps = 4.0 - lambda;
    let (n, ell, a_unif, eta, zeta) = (1_000_000usize, 25usize, 5.0, 1.0, eps / 4.0);
    let est = estimate_expected_s(n, ell, lambda, zeta, eta, a_unif, 200_000, &mut rng)?;
    let pr = bridge_range_prob(ell, a_unif, 200_000, &mut rng);
    let pb = bridge_range_prob(ell - 1, a_unif, 200_000, &mut rng);
    let bound = first_moment_bound(n, ell, lambda, zeta, eta, a_unif, pr.value * pb.value)?;
    let lhs = (est.estimate.value + 3.0 * est.estimate.stderr).ln();
    Ok((
        bound.ln() <= lhs,
        format!(
            "log(estimate + 3 sigma) = {} vs log(bound) = {}",
            fmt17(lhs),
            fmt17(bound.ln())
        ),
    ))
}

fn c16(seed: u64) -> Result<(bool, String), HarnessError> {
    let mut phase = ExperimentConfig::new(ExperimentKind::PhaseDiagram, "unweighted");
    phase.n = vec![200, 400];
    phase.param = vec![0.8, 1.5];
    phase.trials = 6;
    phase.seed = seed;
    let mut ode = ExperimentConfig::new(ExperimentKind::MleVsOde, "exponential");
    ode.n = vec![100, 200];
    ode.param = vec![2.0];
    ode.trials = 4;
    ode.seed = seed;
    let mut cyc = ExperimentConfig::new(ExperimentKind::CyclefindDemo, "unweighted");
    cyc.n = vec![4000];
    cyc.param = vec![4.0];
    cyc.trials = 3;
    cyc.seed = seed;
    let run = |w: usize| -> Result<Vec<String>, HarnessError> {
        Ok(vec![
            run_phase_diagram(&phase, w)?.to_csv(),
            run_mle_vs_ode(&ode, w)?.to_csv(),
            run_cyclefind_demo(&cyc, w)?.table.to_csv(),
        ])
    };
    let one = run(1)?;
    let eight = run(8)?;
    let same = one == eight;
    let bytes: usize = one.iter().map(String::len).sum();
    Ok((same, format!("3 experiments, {bytes} CSV bytes, identical for 1 and 8 workers: {same}")))
}

/// Runs the criteria whose ids are in `only` (all when empty).
pub fn run_acceptance(seed: u64, workers: usize, only: &[usize]) -> Vec<Criterion> {
    let mut out = Vec::new();
    for id in 1..=16usize {
        if !only.is_empty() && !only.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let res: Result<(bool, String), HarnessError> = match id {
            1 => c1(),
            2 => c2(),
            3 => c3(seed, workers),
            4 => c4(seed, workers),
            5 => c5(),
            6 => Ok(c6(seed, workers)),
            7 => Ok(c7(seed, workers)),
            8 => {
                let r = ld_check(&[2.0, 3.0], &[5, 20], &[0.0, 0.2], 1_000_000, seed, workers);
                Ok((r.passed, format!("8 cases, 1e6 samples each: {}", report_detail(&r))))
            }
            9 => {
                let r = erlang_check(50, &[0.5, 1.5], 1_000_000, seed, workers);
                Ok((r.passed, format!("n=50, 1e6 samples: {}", report_detail(&r))))
            }
            10 => {
                let r = bridge_check(50, &[100, 400], 4.0, 100_000, seed);
                Ok((r.passed, report_detail(&r)))
            }
            11 => Ok(c11(seed)),
            12 => c12(seed),
            13 => {
                let r = turan_check(1000, seed);
                Ok((r.passed, report_detail(&r)))
            }
            14 => {
                let r = matching_count_check(6, 10);
                Ok((r.passed, report_detail(&r)))
            }
            15 => c15(seed),
            16 => c16(seed),
            _ => unreachable!("ids are 1..=16"),
        };
        let (passed, detail) = res.unwrap_or_else(|e| (false, format!("error: {e}")));
        out.push(Criterion { id, title: TITLES[id - 1], passed, detail, seconds: start.elapsed().as_secs_f64() });
    }
    out
}
