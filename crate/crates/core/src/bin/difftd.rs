use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use difftd::features::{basis_by_name, ValueEstimate};
use difftd::harness::bellman::{bellman_error, default_grid, BellmanMethod};
use difftd::harness::check::run_checks;
use difftd::harness::config::KEYS;
use difftd::harness::output::{fmt_f64, read_replicas, write_bellman, write_experiment};
use difftd::harness::stats::summarize;
use difftd::harness::{run_experiment, ExperimentConfig, ExperimentResult, KeyValues, ModelConfig};
use difftd::models::{ar1_value_oracle, ou_value_derivative_oracle};
use difftd::{Error, Result, Vector};

#[derive(Parser)]
#[command(name = "difftd", version, about = "Differential TD-learning experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment.
    Estimate(ConfigArgs),
    /// Run one experiment per value of a single key.
    Sweep {
        /// Key to vary, e.g. algorithm.alpha.
        #[arg(long)]
        param: String,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<String>,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Evaluate the Bellman error of a fitted value function.
    Bellman(BellmanArgs),
    /// Print closed-form reference values.
    Oracle {
        #[command(subcommand)]
        which: Oracle,
    },
    /// Run the finite-difference validation suites.
    Check,
}

#[derive(Args)]
struct ConfigArgs {
    /// TOML configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides as `--section.key value`.
    #[arg(trailing_var_arg = true, allow_hyphen_values = true, value_name = "--KEY VALUE")]
    overrides: Vec<String>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Exact,
    Mc,
}

#[derive(Args)]
struct BellmanArgs {
    /// Fitted θ, comma-separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, conflicts_with = "replicas")]
    theta: Option<Vec<f64>>,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    kappa: f64,
    #[arg(long, allow_hyphen_values = true)]
    cbar: Option<f64>,
    /// Replica file; the mean of the usable rows at `--at` is evaluated.
    #[arg(long)]
    replicas: Option<PathBuf>,
    #[arg(long, requires = "replicas")]
    at: Option<u64>,
    #[arg(long, value_enum, default_value = "exact")]
    method: Method,
    #[arg(long, default_value_t = 10_000)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output CSV; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    config: ConfigArgs,
}

#[derive(Subcommand)]
enum Oracle {
    /// Discounted value `θ x² + κ` of the AR(1) chain with cost x².
    Ar1 {
        #[arg(long, allow_hyphen_values = true)]
        a: f64,
        #[arg(long)]
        alpha: f64,
    },
    /// Value-function derivative of the OU diffusion with cost x².
    Ou {
        #[arg(long)]
        beta: f64,
        #[arg(long)]
        gamma: f64,
        #[arg(long, allow_hyphen_values = true)]
        x: f64,
    },
}

fn load_keys(args: &ConfigArgs) -> Result<KeyValues> {
    let mut kv = match &args.config {
        Some(p) => KeyValues::from_file(p)?,
        None => KeyValues::default(),
    };
    kv.apply_overrides(&args.overrides)?;
    Ok(kv)
}

fn report(cfg: &ExperimentConfig, result: &ExperimentResult) -> Result<()> {
    for &t in &result.report_times {
        let rows: Vec<_> = result.rows_at(t).collect();
        let line = match summarize(&rows, t) {
            Ok(s) => {
                let mean: Vec<String> = s.mean.iter().map(|v| format!("{v:.6}")).collect();
                let var: Vec<String> = (0..s.mean.len()).map(|i| format!("{:.3e}", s.variance(i))).collect();
                format!(
                    "T={t} replicas={} theta=[{}] var=[{}] kappa={:.6} cbar={:.6}",
                    s.included,
                    mean.join(", "),
                    var.join(", "),
                    s.kappa_mean,
                    s.cbar_mean
                )
            }
            Err(_) => {
                let ok = result.included_at(t);
                match ok.first() {
                    Some(r) => format!(
                        "T={t} replicas={} theta={:?} kappa={:.6} cbar={:.6}",
                        ok.len(),
                        r.theta,
                        r.kappa,
                        r.cbar
                    ),
                    None => format!("T={t} no usable replica"),
                }
            }
        };
        println!("{line}");
    }
    if let Some(dir) = &cfg.output_dir {
        write_experiment(dir, &cfg.raw.0, result)?;
        println!("wrote {}", dir.display());
    }
    Ok(())
}

fn estimate(args: &ConfigArgs) -> Result<()> {
    let cfg = ExperimentConfig::from_keys(&load_keys(args)?)?;
    let result = run_experiment(&cfg)?;
    report(&cfg, &result)
}

fn sweep(param: &str, values: &[String], args: &ConfigArgs) -> Result<()> {
    let base = load_keys(args)?;
    for v in values {
        let mut kv = base.clone();
        kv.set(param, v.clone())?;
        if let Some(dir) = base.get("output.dir") {
            let sub = Path::new(dir).join(format!("{param}={v}"));
            kv.set("output.dir", sub.to_string_lossy().into_owned())?;
        }
        let cfg = ExperimentConfig::from_keys(&kv)?;
        println!("# {param} = {v}");
        report(&cfg, &run_experiment(&cfg)?)?;
    }
    Ok(())
}

fn bellman(args: &BellmanArgs) -> Result<()> {
    let kv = load_keys(&args.config)?;
    let model = match ModelConfig::from_keys(&kv)? {
        ModelConfig::Ou { .. } => {
            return Err(Error::Config("the Bellman error is defined for discrete-time models".into()))
        }
        m => m.build(1.0)?,
    };
    let basis = basis_by_name(
        kv.get("basis").ok_or_else(|| Error::Config("missing required key 'basis'".into()))?,
    )?;
    let (theta, kappa, cbar) = match (&args.theta, &args.replicas) {
        (Some(theta), None) => {
            let cbar = args
                .cbar
                .ok_or_else(|| Error::Config("--cbar is required with --theta".into()))?;
            (theta.clone(), args.kappa, cbar)
        }
        (None, Some(path)) => {
            let (_, rows) = read_replicas(path)?;
            let t = match args.at {
                Some(t) => t,
                None => rows.iter().map(|r| r.t).max().ok_or_else(|| {
                    Error::Config(format!("{} has no rows", path.display()))
                })?,
            };
            let at: Vec<_> = rows.iter().filter(|r| r.t == t).collect();
            let ok: Vec<_> = at.iter().filter(|r| r.status == difftd::harness::Status::Ok).collect();
            if ok.is_empty() {
                return Err(Error::Config(format!("no usable replica at T={t}")));
            }
            let n = ok.len() as f64;
            let l = ok[0].theta.len();
            let theta = (0..l).map(|i| ok.iter().map(|r| r.theta[i]).sum::<f64>() / n).collect();
            let kappa = ok.iter().map(|r| r.kappa).sum::<f64>() / n;
            let cbar = args.cbar.unwrap_or(ok.iter().map(|r| r.cbar).sum::<f64>() / n);
            (theta, kappa, cbar)
        }
        _ => return Err(Error::Config("give either --theta or --replicas".into())),
    };
    let h = ValueEstimate::new(Vector::from_vec(theta), kappa);
    let method = match args.method {
        Method::Exact => BellmanMethod::Exact,
        Method::Mc => BellmanMethod::MonteCarlo { samples: args.samples, seed: args.seed },
    };
    let rep = bellman_error(&h, basis.as_ref(), model.as_ref(), cbar, &default_grid(), method)?;
    match &args.out {
        Some(p) => {
            write_bellman(p, &rep)?;
            println!("sup|E_B| = {}", fmt_f64(rep.sup_abs()));
        }
        None => {
            println!("x,bellman_error,stderr");
            for p in &rep.points {
                println!("{},{},{}", fmt_f64(p.x), fmt_f64(p.error), fmt_f64(p.stderr));
            }
        }
    }
    Ok(())
}

fn check() -> Result<bool> {
    let lines = run_checks()?;
    let mut all = true;
    for l in &lines {
        all &= l.passed;
        println!(
            "{} {:<28} max_err={:.3e} tol={:.0e} ({})",
            if l.passed { "PASS" } else { "FAIL" },
            l.name,
            l.max_error,
            l.tolerance,
            l.detail
        );
    }
    Ok(all)
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Estimate(args) => estimate(&args).map(|_| true),
        Command::Sweep { param, values, config } => sweep(&param, &values, &config).map(|_| true),
        Command::Bellman(args) => bellman(&args).map(|_| true),
        Command::Oracle { which } => {
            match which {
                Oracle::Ar1 { a, alpha } => {
                    let (theta, kappa) = ar1_value_oracle(a, alpha)?;
                    println!("theta = {}", fmt_f64(theta));
                    println!("kappa = {}", fmt_f64(kappa));
                }
                Oracle::Ou { beta, gamma, x } => {
                    println!("h' = {}", fmt_f64(ou_value_derivative_oracle(beta, gamma, x)?));
                }
            }
            Ok(true)
        }
        Command::Check => check(),
    }
}

/// Moves `--section.key value` config overrides behind the subcommand's own
/// flags, which the trailing override list would otherwise swallow.
fn overrides_last(args: Vec<String>) -> Vec<String> {
    let (mut front, mut back) = (Vec::new(), Vec::new());
    let mut it = args.into_iter();
    while let Some(a) = it.next() {
        let key = a.strip_prefix("--").map(|f| f.split_once('=').map_or(f, |(k, _)| k));
        match key {
            Some(k) if KEYS.contains(&k) => {
                let inline = a.contains('=');
                back.push(a);
                if !inline {
                    back.extend(it.next());
                }
            }
            _ => front.push(a),
        }
    }
    front.extend(back);
    front
}

fn main() -> ExitCode {
    match run(Cli::parse_from(overrides_last(std::env::args().collect()))) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
