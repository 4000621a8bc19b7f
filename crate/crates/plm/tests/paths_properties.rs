use plm::paths::*;
use plm::rng::{from_seed, substream};
use rand::Rng;
use rand_distr::{Distribution, Exp1};

#[test]
fn light_uniform_paths_satisfy_subpath_excess() {
    let (lambda, eps) = (2.0, 2.0);
    let (zeta, eta, a_unif, ell, n) = (eps / 4.0, 1.0, 20.0, 960usize, 1_000_000usize);
    let (a, b) = light_centers(lambda, zeta);
    let mut rng = substream(7, "light-uniform");
    for _ in 0..10_000 {
        let p = sample_light_uniform_path(n, ell, lambda, zeta, eta, a_unif, &mut rng).unwrap();
        let s = path_stats(&p).unwrap();
        assert!(is_light(&s, ell, a, b, eta) && is_uniform(&s, a_unif));
        assert!(subpath_excess_ok(&p, n as f64, lambda, 1.0 / 96.0, eps));
    }
}

#[test]
fn bridge_range_independent_of_total() {
    let mut rng = from_seed(21);
    let k = 100_000;
    let (mut xs, mut ys) = (Vec::with_capacity(k), Vec::with_capacity(k));
    for _ in 0..k {
        let b = sample_bridge(50, &mut rng);
        xs.push(b.total);
        ys.push(b.max_abs());
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let (mx, my) = (mean(&xs), mean(&ys));
    let cov: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let vx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let vy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    assert!((cov / (vx * vy).sqrt()).abs() < 0.01);
}

#[test]
fn bridge_range_log_linear_in_length() {
    let mut rng = from_seed(22);
    let fit = fit_bridge_constant(&[100, 200, 300, 400, 500, 600, 700, 800], 8.0, 40_000, &mut rng);
    assert!(fit.r_squared > 0.95, "{fit:?}");
    assert!(fit.c > 0.0);
}

#[test]
fn random_exponential_paths_uniform_rate_matches_bridges() {
    let mut rng = from_seed(23);
    let (ell, a_unif, trials) = (100usize, 5.0, 40_000usize);
    let mut pass = 0usize;
    for _ in 0..trials {
        let red: Vec<f64> = (0..ell).map(|_| -> f64 { Exp1.sample(&mut rng) }).collect();
        let blue: Vec<f64> = (0..ell - 1).map(|_| -> f64 { let x: f64 = Exp1.sample(&mut rng); 1000.0 * x }).collect();
        let s = path_stats(&AlternatingPathSample::new(red, blue, true).unwrap()).unwrap();
        pass += is_uniform(&s, a_unif) as usize;
    }
    let rate = pass as f64 / trials as f64;
    let pr = bridge_range_prob(ell, a_unif, trials, &mut rng);
    let pb = bridge_range_prob(ell - 1, a_unif, trials, &mut rng);
    let expect = pr.value * pb.value;
    let se = ((rate * (1.0 - rate) / trials as f64) + (pr.stderr * pb.value).powi(2) + (pb.stderr * pr.value).powi(2)).sqrt();
    assert!((rate - expect).abs() < 4.0 * se, "{rate} vs {expect}");
}

#[test]
fn chernoff_dominance_million_samples() {
    let mut rng = from_seed(24);
    let trials = 1_000_000;
    let (mut up, mut down) = (0usize, 0usize);
    for _ in 0..trials {
        let s: f64 = (0..50).map(|_| -> f64 { Exp1.sample(&mut rng) }).sum();
        up += (s >= 75.0) as usize;
        down += (s <= 25.0) as usize;
    }
    assert!(up as f64 / trials as f64 <= erlang_chernoff(50, 1.5));
    assert!(down as f64 / trials as f64 <= erlang_chernoff(50, 0.5));
}

#[test]
fn first_moment_bound_below_estimate() {
    let mut rng = from_seed(25);
    let lambda = 3.5;
    let eps = 4.0 - lambda;
    let (n, ell, a_unif, eta, zeta) = (1_000_000usize, 25usize, 5.0, 1.0, eps / 4.0);
    let est = estimate_expected_s(n, ell, lambda, zeta, eta, a_unif, 200_000, &mut rng).unwrap();
    let pr = bridge_range_prob(ell, a_unif, 200_000, &mut rng);
    let pb = bridge_range_prob(ell - 1, a_unif, 200_000, &mut rng);
    let bound = first_moment_bound(n, ell, lambda, zeta, eta, a_unif, pr.value * pb.value).unwrap();
    assert!(bound <= est.estimate.value + 3.0 * est.estimate.stderr, "{bound} vs {:?}", est.estimate);
    assert!(est.estimate.value > 0.0);
}

#[test]
fn estimate_dominates_bound_on_grid() {
    let mut rng = from_seed(26);
    for &lambda in &[3.0, 3.5, 3.9] {
        let eps = 4.0 - lambda;
        for &(ell, a_unif) in &[(16usize, 4.0), (25, 5.0), (49, 7.0)] {
            for &n in &[10_000usize, 1_000_000] {
                let est = estimate_expected_s(n, ell, lambda, eps / 4.0, 1.0, a_unif, 50_000, &mut rng).unwrap();
                let p = est.p_uniform.value;
                let bound = first_moment_bound(n, ell, lambda, eps / 4.0, 1.0, a_unif, p).unwrap();
                assert!(
                    est.estimate.value >= bound - 3.0 * est.estimate.stderr,
                    "lambda {lambda} l {ell} n {n}: {:?} vs {bound}",
                    est.estimate
                );
            }
        }
    }
}

#[test]
fn disjoint_extraction_meets_turan_bound() {
    let mut rng = from_seed(27);
    let paths: Vec<Vec<usize>> =
        (0..200).map(|_| (0..rng.random_range(3..12)).map(|_| rng.random_range(0..5000)).collect()).collect();
    let kept = extract_disjoint_paths(&paths);
    let mut edges = 0usize;
    for i in 0..paths.len() {
        for j in i + 1..paths.len() {
            edges += paths[i].iter().any(|v| paths[j].contains(v)) as usize;
        }
    }
    let v = paths.len() as f64;
    assert!(kept.len() as f64 >= v * v / (2.0 * edges as f64 + v));
    for (x, &i) in kept.iter().enumerate() {
        for &j in &kept[x + 1..] {
            assert!(paths[i].iter().all(|v| !paths[j].contains(v)));
        }
    }
    let shared: Vec<Vec<usize>> = (0..30).map(|i| vec![i + 10, 7, i + 100]).collect();
    assert_eq!(extract_disjoint_paths(&shared).len(), 1);
}
