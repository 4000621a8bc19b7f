use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn plm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_plm")).args(args).env_remove("PLM_WORKERS").output().expect("spawn plm")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).expect("utf8")
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("plm-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn generate_then_solve_recovers_the_summary() {
    let inst = scratch("exp.txt");
    let g = plm(&["generate", "--model", "exponential", "-n", "30", "--param", "3", "--seed", "9", "--out", s(&inst)]);
    assert!(g.status.success());
    let again = plm(&["generate", "--model", "exponential", "-n", "30", "--param", "3", "--seed", "9"]);
    assert_eq!(std::fs::read_to_string(&inst).unwrap(), stdout(&again));

    let o = plm(&["solve", s(&inst)]);
    assert!(o.status.success());
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 31);
    let mut targets: Vec<usize> = lines[..30]
        .iter()
        .enumerate()
        .map(|(i, l)| {
            let (a, b) = l.split_once(" -> ").expect("arrow");
            assert_eq!(a.parse::<usize>().unwrap(), i);
            b.parse().unwrap()
        })
        .collect();
    targets.sort_unstable();
    assert_eq!(targets, (0..30).collect::<Vec<_>>());
    assert!(lines[30].starts_with("error=") && lines[30].contains(" objective="));
}

#[test]
fn posterior_dump_is_sorted_and_normalized() {
    let inst = scratch("small.txt");
    assert!(plm(&["generate", "--model", "exponential", "-n", "5", "--param", "2", "--seed", "3", "--out", s(&inst)])
        .status
        .success());
    let o = plm(&["solve", "--posterior", s(&inst)]);
    assert!(o.status.success());
    let masses: Vec<f64> =
        stdout(&o).lines().map(|l| l.rsplit(' ').next().unwrap().parse::<f64>().unwrap()).collect();
    assert_eq!(masses.len(), 120);
    assert!(masses.windows(2).all(|w| w[0] >= w[1]));
    let total: f64 = masses.iter().map(|m| m.exp()).sum();
    assert!((total - 1.0).abs() < 1e-9);
}

#[test]
fn ode_writes_the_documented_csv() {
    let o = plm(&["ode", "--grid", "2:3:1", "--tol", "1e-8"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "lambda,delta,error,x_max,remainder_bound");
    assert_eq!(lines.len(), 3);
    let err2: f64 = lines[1].split(',').nth(2).unwrap().parse().unwrap();
    assert!((err2 - 0.210167).abs() < 1e-4);
    assert!(!text.contains('\r'));
}

#[test]
fn threshold_reports_the_exponential_root() {
    let o = plm(&["threshold", "--model", "exponential", "--d", "1000000"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let root: f64 = text.lines().next().unwrap().strip_prefix("lambda_threshold=").unwrap().parse().unwrap();
    assert!((root - 4.0).abs() < 1e-2);
    let o = plm(&["threshold", "--p", "exp:1", "--q", "exp:1", "--d", "4"]);
    assert!(stdout(&o).contains("margin=1.0000000000000000e0"));
}

#[test]
fn cyclefind_prints_cycles_and_summary() {
    let o = plm(&["cyclefind", "-n", "3000", "--param", "4", "--seed", "1", "--set", "subsets=4"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let last = text.lines().last().unwrap();
    assert!(last.starts_with("# trees=") && last.contains(" K1=") && last.contains(" d_super="));
    for l in text.lines().filter(|l| !l.starts_with('#')) {
        let len: usize = l.strip_prefix("len=").unwrap().split(' ').next().unwrap().parse().unwrap();
        assert_eq!(len % 2, 0);
        assert!(l.contains(" delta=") && l.contains(" key="));
    }
}

#[test]
fn experiment_output_is_identical_across_worker_counts() {
    let cfg = scratch("pd.cfg");
    std::fs::write(&cfg, "kind=phase_diagram\nmodel=unweighted\nn=80\nn=160\nparam=0.7\nparam=1.6\ntrials=6\nseed=4\n")
        .unwrap();
    let a = plm(&["experiment", "--config", s(&cfg), "--workers", "1"]);
    let b = plm(&["experiment", "--config", s(&cfg), "--workers", "8"]);
    assert!(a.status.success() && b.status.success());
    assert_eq!(a.stdout, b.stdout);
    let svg = scratch("pd.svg");
    let c = plm(&["experiment", "--config", s(&cfg), "--plot", s(&svg)]);
    assert!(c.status.success());
    assert!(std::fs::read_to_string(&svg).unwrap().starts_with("<svg"));
}

#[test]
fn check_passes_and_usage_errors_exit_two() {
    let o = plm(&["check", "matching_count", "turan"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).starts_with("check,case,measured,limit,passed\n"));
    assert_eq!(plm(&["bogus"]).status.code(), Some(2));
    assert_eq!(plm(&["check", "no_such_check"]).status.code(), Some(2));
    assert_eq!(plm(&["ode", "--lambda", "2", "--tol", "5"]).status.code(), Some(2));
    assert_eq!(plm(&["solve", "/nonexistent/instance"]).status.code(), Some(2));
}
