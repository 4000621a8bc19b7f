use clap::{Args, Parser, Subcommand};
use plm::asymptotics::OdeControls;
use plm::cyclefinder::{run_pipeline, CycleConfig};
use plm::dist::{divergences, exponential_threshold_rate, threshold_margin, DivergenceConfig, WeightDistribution};
use plm::harness::checks::CheckName;
use plm::harness::{
    build_instance, default_workers, emit_plot, run_checks, run_experiment, run_ode_curve, ExperimentConfig, PlotKind,
};
use plm::matching::{mle, objective, reconstruction_error, LlrGraph};
use plm::model::{fmt17, read_instance, write_instance, ModelDescriptor, PlantedInstance};
use plm::posterior::exhaustive_posterior_llr;
use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "plm", version, about = "Planted matching recovery experiments")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Configuration file of key=value lines.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output path; standard output when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads; defaults to PLM_WORKERS or the available parallelism.
    #[arg(long, global = true)]
    workers: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a planted instance.
    Generate {
        /// unweighted, exponential, sparse(P,Q) or dense(P,RHO).
        #[arg(long, default_value = "unweighted")]
        model: String,
        #[arg(short, long)]
        n: usize,
        /// Mean degree, or the planted rate for the exponential model.
        #[arg(long, alias = "d", alias = "lambda", default_value_t = 1.0)]
        param: f64,
    },
    /// Maximum-likelihood matching of an instance file.
    Solve {
        instance: PathBuf,
        /// Print the exhaustive posterior instead (small n only).
        #[arg(long)]
        posterior: bool,
    },
    /// Divergences and the recovery threshold margin.
    Threshold {
        /// sparse(P,Q), exponential or unweighted; overrides --p and --q.
        #[arg(long)]
        model: Option<String>,
        #[arg(long)]
        p: Option<String>,
        #[arg(long)]
        q: Option<String>,
        /// Mean degree; for the exponential model the size n.
        #[arg(long, default_value_t = 1.0)]
        d: f64,
        /// Planted rate of the exponential model.
        #[arg(long, default_value_t = 4.0)]
        lambda: f64,
    },
    /// Asymptotic exponential-model error from the ODE system.
    Ode {
        #[arg(long, required_unless_present = "grid")]
        lambda: Option<f64>,
        /// Rates a:b:step, inclusive.
        #[arg(long)]
        grid: Option<String>,
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Long alternating cycle search.
    Cyclefind {
        /// Instance file; generated from --model, -n and --param when omitted.
        instance: Option<PathBuf>,
        #[arg(long, default_value = "unweighted")]
        model: String,
        #[arg(short, long)]
        n: Option<usize>,
        #[arg(long, alias = "d", alias = "lambda", default_value_t = 4.0)]
        param: f64,
        /// Parameter overrides key=value.
        #[arg(long = "set")]
        set: Vec<String>,
    },
    /// Run an experiment described by --config.
    Experiment {
        /// Also write an SVG plot of the table here.
        #[arg(long)]
        plot: Option<PathBuf>,
    },
    /// Run property checks; all when none are named.
    Check { names: Vec<String> },
}

struct Failure {
    code: u8,
    message: String,
}

impl<E: std::fmt::Display> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure { code: 2, message: e.to_string() }
    }
}

type CmdResult = Result<bool, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn emit(out: &Option<PathBuf>, text: &str) -> Result<(), Failure> {
    match out {
        Some(p) => std::fs::write(p, text).map_err(|e| Failure::from(format!("{}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn read_file(p: &PathBuf) -> Result<String, Failure> {
    std::fs::read_to_string(p).map_err(|e| Failure::from(format!("{}: {e}", p.display())))
}

fn run(cli: Cli) -> CmdResult {
    let c = cli.common;
    let workers = c.workers.unwrap_or_else(default_workers).max(1);
    let seed = c.seed.unwrap_or(0);
    match cli.command {
        Command::Generate { model, n, param } => {
            let inst = build_instance(&model, n, param, seed)?;
            emit(&c.out, &write_instance(&inst.graph, Some(&inst.planted)))?;
            Ok(true)
        }
        Command::Solve { instance, posterior } => {
            let file = read_instance(&read_file(&instance)?)?;
            let llr = LlrGraph::from_graph(&file.graph);
            let mut s = String::new();
            if posterior {
                s = exhaustive_posterior_llr(&llr)?.dump();
            } else {
                let m = mle(&llr)?;
                for (i, j) in m.perm().iter().enumerate() {
                    let _ = writeln!(s, "{i} -> {j}");
                }
                if let Some(truth) = &file.planted {
                    let e = reconstruction_error(&m, truth)?;
                    let _ = writeln!(s, "error={} objective={}", fmt17(e), fmt17(objective(&llr, &m)));
                }
            }
            emit(&c.out, &s)?;
            Ok(true)
        }
        Command::Threshold { model, p, q, d, lambda } => threshold(model, p, q, d, lambda, &c.out),
        Command::Ode { lambda, grid, tol } => {
            let lambdas = match grid {
                Some(g) => parse_grid(&g)?,
                None => vec![lambda.expect("required by clap")],
            };
            let mut ctl = OdeControls::default();
            if let Some(t) = tol {
                if !(t > 0.0 && t < 1.0) {
                    return Err(format!("tol {t} outside (0, 1)").into());
                }
                ctl.rel_tol = t;
                ctl.abs_tol = t / 100.0;
            }
            emit(&c.out, &run_ode_curve(&lambdas, &ctl, workers)?.to_csv())?;
            Ok(true)
        }
        Command::Cyclefind { instance, model, n, param, set } => {
            let inst = match instance {
                Some(p) => {
                    let file = read_instance(&read_file(&p)?)?;
                    let planted = file.planted.ok_or_else(|| Failure::from("instance has no #PLANTED trailer"))?;
                    PlantedInstance { graph: file.graph, planted }
                }
                None => {
                    let n = n.ok_or_else(|| Failure::from("either an instance file or -n is required"))?;
                    build_instance(&model, n, param, seed)?
                }
            };
            let mut cfg = CycleConfig::for_graph(&inst.graph)?;
            let mut pairs: Vec<String> = Vec::new();
            if let Some(p) = &c.config {
                pairs.extend(config_lines(&read_file(p)?));
            }
            pairs.extend(set);
            for kv in pairs {
                let (k, v) = kv.split_once('=').ok_or_else(|| Failure::from(format!("expected key=value, got '{kv}'")))?;
                cfg.set(k.trim(), v.trim())?;
            }
            let report = run_pipeline(&inst, &cfg)?;
            emit(&c.out, &report.render())?;
            Ok(true)
        }
        Command::Experiment { plot } => {
            let path = c.config.as_ref().ok_or_else(|| Failure::from("experiment needs --config"))?;
            let mut cfg = ExperimentConfig::parse(&read_file(path)?)?;
            if let Some(s) = c.seed {
                cfg.seed = s;
            }
            let workers = c.workers.or(cfg.workers).unwrap_or_else(default_workers).max(1);
            let out = c.out.clone().or_else(|| cfg.out.clone().map(PathBuf::from));
            let result = run_experiment(&cfg, workers)?;
            let csv = result.table.to_csv();
            emit(&out, &csv)?;
            if let Some(p) = plot {
                let kind: PlotKind = cfg.kind.as_str().parse()?;
                std::fs::write(&p, emit_plot(&csv, kind)?).map_err(|e| Failure::from(format!("{}: {e}", p.display())))?;
            }
            Ok(result.passed)
        }
        Command::Check { names } => {
            let list: Vec<CheckName> = if names.is_empty() {
                CheckName::ALL.to_vec()
            } else {
                names.iter().map(|s| s.parse()).collect::<Result<_, _>>()?
            };
            let report = run_checks(&list, seed, workers);
            emit(&c.out, &report.table.to_csv())?;
            for row in report.failures() {
                let cells: Vec<String> = row.iter().map(|c| c.to_string()).collect();
                eprintln!("FAIL {}", cells.join(" "));
            }
            Ok(report.passed)
        }
    }
}

fn config_lines(text: &str) -> impl Iterator<Item = String> + '_ {
    text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')).map(String::from)
}

fn parse_grid(g: &str) -> Result<Vec<f64>, Failure> {
    let parts: Vec<f64> = g
        .split(':')
        .map(|t| t.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| Failure::from(format!("grid '{g}' is not a:b:step")))?;
    let [a, b, step] = parts[..] else {
        return Err(format!("grid '{g}' is not a:b:step").into());
    };
    if !(step > 0.0) || !(b >= a) || !a.is_finite() || !b.is_finite() {
        return Err(format!("grid '{g}' needs a <= b and step > 0").into());
    }
    let count = ((b - a) / step + 1e-9).floor() as usize;
    Ok((0..=count).map(|k| a + k as f64 * step).collect())
}

fn threshold(
    model: Option<String>,
    p: Option<String>,
    q: Option<String>,
    d: f64,
    lambda: f64,
    out: &Option<PathBuf>,
) -> CmdResult {
    let cfg = DivergenceConfig::default();
    let mut s = String::new();
    let model = match model.map(|m| m.trim().to_ascii_lowercase()) {
        Some(m) if m == "exponential" => Some(ModelDescriptor::Exponential { lambda }),
        Some(m) if m == "unweighted" => Some(ModelDescriptor::Unweighted),
        Some(m) => Some(m.parse::<ModelDescriptor>()?),
        None => None,
    };
    let (p, q, d) = match model {
        Some(m @ ModelDescriptor::Exponential { .. }) => {
            let n = d.round() as usize;
            let root = exponential_threshold_rate(n, &cfg)?;
            let _ = writeln!(s, "lambda_threshold={}", fmt17(root));
            (m.planted_law(), m.unplanted_law(n), n as f64)
        }
        Some(m) => (m.planted_law(), m.unplanted_law(d.round().max(1.0) as usize), d),
        None => {
            let law = |s: Option<String>, name: &str| -> Result<WeightDistribution, Failure> {
                s.ok_or_else(|| Failure::from(format!("--{name} or --model is required")))?.parse().map_err(Failure::from)
            };
            (law(p, "p")?, law(q, "q")?, d)
        }
    };
    let r = divergences(&p, &q, &cfg)?;
    let _ = writeln!(s, "bhattacharyya={}", fmt17(r.bhattacharyya));
    let _ = writeln!(s, "alpha={}", fmt17(r.alpha));
    let _ = writeln!(s, "kl_pq={}", fmt17(r.kl_pq));
    let _ = writeln!(s, "kl_qp={}", fmt17(r.kl_qp));
    let _ = writeln!(s, "margin={}", fmt17(threshold_margin(d, &p, &q, &cfg)?));
    emit(out, &s)?;
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_is_inclusive() {
        assert_eq!(parse_grid("1:2:0.5").ok().unwrap(), vec![1.0, 1.5, 2.0]);
        assert!(parse_grid("2:1:0.5").is_err());
        assert!(parse_grid("1:2").is_err());
    }
}
