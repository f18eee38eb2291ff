mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};

use lie_dichotomy::algebra::AlgebraKind;
use lie_dichotomy::Error;

use config::{load_config, Experiment, RunConfig};

const THREADS_VAR: &str = "LIE_DICHOTOMY_THREADS";

#[derive(Parser, Debug)]
#[command(name = "lie-dichotomy", version, about = "Policy-gradient experiments on matrix Lie groups")]
struct Cli {
    /// TOML run configuration; defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Comma-separated seed list.
    #[arg(long, global = true, value_delimiter = ',')]
    seed: Option<Vec<u64>>,
    /// Output root; results go to `<out>/<experiment>/<tag>/`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Run directory name; defaults to the config hash prefix.
    #[arg(long, global = true)]
    tag: Option<String>,
    #[arg(long, global = true, value_delimiter = ',')]
    radii: Option<Vec<f64>>,
    /// Joint count, or a comma list for sweeps.
    #[arg(long = "J", global = true, value_delimiter = ',')]
    joints: Option<Vec<usize>>,
    /// Parameter radius; a comma list for `se3` (`inf` allowed).
    #[arg(long = "B-theta", global = true, value_delimiter = ',')]
    b_theta: Option<Vec<f64>>,
    #[arg(long = "kappa-M", global = true, value_delimiter = ',')]
    kappa_m: Option<Vec<f64>>,
    #[arg(long = "sigma-eps", global = true, value_delimiter = ',')]
    sigma_eps: Option<Vec<f64>>,
    #[arg(long, global = true, value_delimiter = ',', allow_negative_numbers = true)]
    t: Option<Vec<f64>>,
    /// Exploration scale; a comma list for `witness`.
    #[arg(long, global = true, value_delimiter = ',')]
    sigma: Option<Vec<f64>>,
    #[arg(long = "n-mc", global = true)]
    n_mc: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Numerical self-checks of the core routines.
    Validate,
    /// Empirical Lipschitz growth on compact, se(3) and gl(2).
    Dichotomy,
    /// Train with the configured method and environment.
    Train,
    /// Cholesky versus blockwise projection timing.
    Bench,
    /// Ablation sweeps.
    Ablate {
        #[arg(value_enum)]
        study: Ablation,
    },
    /// Norm growth on SE(3) with and without a radius bound.
    Se3,
    /// Curvature of the exponential residual along a diagonal ray.
    Witness,
    /// Convergence-rate slopes.
    Slopes,
    /// Paired method comparison.
    Compare,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum Ablation {
    Anisotropy,
    Robustness,
    Joints,
}

impl Command {
    fn experiment(&self) -> Experiment {
        match self {
            Command::Validate => Experiment::Validate,
            Command::Dichotomy => Experiment::Dichotomy,
            Command::Train => Experiment::Train,
            Command::Bench => Experiment::Bench,
            Command::Ablate { study: Ablation::Anisotropy } => Experiment::Anisotropy,
            Command::Ablate { study: Ablation::Robustness } => Experiment::Robustness,
            Command::Ablate { study: Ablation::Joints } => Experiment::Joints,
            Command::Se3 => Experiment::Se3,
            Command::Witness => Experiment::Witness,
            Command::Slopes => Experiment::Slopes,
            Command::Compare => Experiment::Methods,
        }
    }
}

fn apply_overrides(cli: &Cli, cfg: &mut RunConfig) {
    let exp = cfg.experiment;
    if let Some(s) = &cli.seed {
        cfg.seeds = s.clone();
    }
    if let Some(o) = &cli.out {
        cfg.output_dir = o.clone();
    }
    if let Some(r) = &cli.radii {
        cfg.study.radii = Some(r.clone());
    }
    if let Some(j) = &cli.joints {
        match exp {
            Experiment::Bench | Experiment::Joints => cfg.study.joints = Some(j.clone()),
            _ => {
                if let Some(&first) = j.first() {
                    cfg.algebra.kind = AlgebraKind::So3Product(first);
                    cfg.algebra.n = 3;
                }
            }
        }
    }
    if let Some(b) = &cli.b_theta {
        match exp {
            Experiment::Se3 => cfg.study.b_values = Some(b.clone()),
            _ => {
                if let Some(&first) = b.first() {
                    cfg.optimizer.b_theta = first;
                }
            }
        }
    }
    if let Some(k) = &cli.kappa_m {
        cfg.study.kappa_m = Some(k.clone());
    }
    if let Some(s) = &cli.sigma_eps {
        cfg.study.sigma_eps = Some(s.clone());
    }
    if let Some(t) = &cli.t {
        cfg.study.t = Some(t.clone());
    }
    if let Some(s) = &cli.sigma {
        match exp {
            Experiment::Witness => cfg.study.sigma = Some(s.clone()),
            _ => {
                if let Some(&first) = s.first() {
                    cfg.optimizer.sigma = first;
                }
            }
        }
    }
    if let Some(n) = cli.n_mc {
        cfg.study.n_mc = Some(n);
    }
    cfg.sync_smoothness();
}

fn thread_cap() -> Result<Option<usize>, String> {
    match std::env::var(THREADS_VAR) {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(format!("{THREADS_VAR}: expected a positive integer, got `{v}`")),
        },
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let experiment = cli.command.experiment();

    let threads = match thread_cap() {
        Ok(t) => t,
        Err(msg) => {
            eprintln!("error: {msg}");
            return ExitCode::from(2);
        }
    };
    if let Some(n) = threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {THREADS_VAR}: {e}");
            return ExitCode::from(2);
        }
    }

    let mut warnings = Vec::new();
    let mut cfg = match &cli.config {
        Some(path) => {
            let (cfg, diag) = load_config(path);
            for w in &diag.warnings {
                eprintln!("warning: {w}");
            }
            warnings.extend(diag.warnings);
            match cfg {
                Some(c) => c,
                None => {
                    for e in &diag.errors {
                        eprintln!("error: {e}");
                    }
                    return ExitCode::from(2);
                }
            }
        }
        None => RunConfig::defaults(experiment),
    };
    if cfg.experiment != experiment {
        let w = format!("config experiment `{}` overridden by subcommand `{experiment}`", cfg.experiment);
        eprintln!("warning: {w}");
        warnings.push(w);
        cfg.experiment = experiment;
    }
    apply_overrides(&cli, &mut cfg);
    let violations = cfg.violations();
    if !violations.is_empty() {
        for v in &violations {
            eprintln!("error: {v}");
        }
        return ExitCode::from(2);
    }

    let hash = cfg.hash();
    let tag = cli.tag.clone().unwrap_or_else(|| hash[..12].to_owned());
    let start = Instant::now();
    let outcome = match commands::run(&cfg) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            let code = matches!(e, Error::Config(_) | Error::Argument(_)) as u8 + 1;
            return ExitCode::from(code);
        }
    };
    let elapsed = start.elapsed().as_secs_f64();

    match write_outputs(&cfg, &tag, &hash, &outcome, &warnings, elapsed, threads) {
        Ok(dir) => println!("wrote {}", dir.display()),
        Err(e) => {
            eprintln!("error: writing results: {e}");
            return ExitCode::from(1);
        }
    }
    for c in &outcome.checks {
        let status = if c.passed { "PASS" } else { "FAIL" };
        if c.detail.is_empty() {
            println!("{status} {}", c.name);
        } else {
            println!("{status} {}: {}", c.name, c.detail);
        }
    }
    if outcome.checks.iter().all(|c| c.passed) {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

fn write_outputs(
    cfg: &RunConfig,
    tag: &str,
    hash: &str,
    outcome: &commands::Outcome,
    warnings: &[String],
    elapsed: f64,
    threads: Option<usize>,
) -> std::io::Result<PathBuf> {
    let dir = output::run_dir(&cfg.output_dir, cfg.experiment.name(), tag)?;
    let seeds: Vec<String> = cfg.seeds.iter().map(u64::to_string).collect();
    let comment = format!("config_sha256={hash} seeds={}", seeds.join(";"));
    for (i, table) in outcome.tables.iter().enumerate() {
        let file = if i == 0 { "results.csv".to_owned() } else { format!("{}.csv", table.name) };
        output::emit_csv(table, &dir.join(file), &comment)?;
    }
    std::fs::write(dir.join("config.snapshot"), cfg.snapshot())?;

    let mut meta = vec![
        format!("experiment = {}", cfg.experiment),
        format!("tag = {tag}"),
        format!("config_sha256 = {hash}"),
        format!("seeds = {}", seeds.join(";")),
        format!("threads = {}", threads.map_or_else(|| rayon::current_num_threads().to_string(), |n| n.to_string())),
        format!("version = {}", env!("CARGO_PKG_VERSION")),
        format!("elapsed_s = {elapsed:.3}"),
    ];
    for (k, v) in &outcome.meta {
        meta.push(format!("{k} = {v}"));
    }
    for c in &outcome.checks {
        meta.push(format!("check = {} {}", if c.passed { "PASS" } else { "FAIL" }, c.name));
    }
    for w in warnings {
        meta.push(format!("warning = {w}"));
    }
    meta.push(String::new());
    std::fs::write(dir.join("meta.txt"), meta.join("\n"))?;
    Ok(dir)
}
