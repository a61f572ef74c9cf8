//! `resbasis` command-line driver: list the built-in problems, run a staged
//! solve and write its stage table and field dumps, or run the oracle checks.

mod output;

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand};

use resbasis::checks;
use resbasis::problems::{builtin, PRESET_NAMES};
use resbasis::solver::{solve_with, SolverConfig};

use output::OutputOptions;

#[derive(Parser, Debug)]
#[command(
    name = "resbasis",
    version,
    about = "Adaptive neural basis collocation solver"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Print the built-in problems with their default parameters.
    List,
    /// Run a staged solve and write its outputs.
    Solve(SolveArgs),
    /// Run the gradient, derivative, least-squares and sampling checks.
    Check {
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

#[derive(clap::Args, Debug)]
struct SolveArgs {
    /// Built-in problem name (see `list`); may also come from the config file.
    #[arg(long)]
    problem: Option<String>,
    /// `key = value` file applied on top of the problem defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Parameter override, applied after the config file.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Skip the per-stage field dumps.
    #[arg(long)]
    no_fields: bool,
    /// Leave the wall_ms column empty so repeated runs are byte-identical.
    #[arg(long)]
    no_timing: bool,
}

/// Failure classes mapped to exit codes.
enum Failure {
    Usage(anyhow::Error),
    Numerical(anyhow::Error),
}

impl Failure {
    fn usage(e: impl Into<anyhow::Error>) -> Self {
        Failure::Usage(e.into())
    }
}

/// Splits a config text into the problem name (if present) and the rest.
fn split_problem(text: &str) -> (Option<String>, String) {
    let mut problem = None;
    let mut rest = String::new();
    for line in text.lines() {
        let content = line.split('#').next().unwrap_or("");
        match content.split_once('=') {
            Some((k, v)) if k.trim() == "problem" => problem = Some(v.trim().to_string()),
            _ => {
                rest.push_str(line);
                rest.push('\n');
            }
        }
    }
    (problem, rest)
}

fn resolve(args: &SolveArgs) -> Result<(resbasis::problems::ProblemSpec, SolverConfig), Failure> {
    let (file_problem, file_text) = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))
                .map_err(Failure::usage)?;
            split_problem(&text)
        }
        None => (None, String::new()),
    };
    let name = args
        .problem
        .clone()
        .or(file_problem)
        .ok_or_else(|| Failure::usage(anyhow!("no problem given; use --problem NAME")))?;
    let problem = match builtin(&name) {
        Ok(p) => p,
        Err(resbasis::Error::UnknownProblem(n)) => {
            return Err(Failure::usage(anyhow!(
                "unknown problem `{n}`; available: {}",
                PRESET_NAMES.join(", ")
            )))
        }
        Err(e) => return Err(Failure::Numerical(e.into())),
    };
    let mut config = problem.defaults.clone();
    config.apply_text(&file_text).map_err(Failure::usage)?;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    for kv in &args.set {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Failure::usage(anyhow!("--set expects KEY=VALUE, got `{kv}`")))?;
        config.set(k, v).map_err(Failure::usage)?;
    }
    config.validate().map_err(Failure::usage)?;
    Ok((problem, config))
}

fn run_solve(args: &SolveArgs) -> Result<(), Failure> {
    let (problem, config) = resolve(args)?;
    std::fs::create_dir_all(&args.out)
        .with_context(|| format!("creating {}", args.out.display()))
        .map_err(Failure::usage)?;
    let opts = OutputOptions {
        dir: args.out.clone(),
        fields: !args.no_fields,
        timing: !args.no_timing,
    };
    output::write_config(&opts, &problem.name, &config).map_err(Failure::usage)?;
    println!("solving {} with seed {}", problem.name, config.seed);
    let outcome = solve_with(&problem, &config, |r| {
        let err = r
            .errors
            .map(|e| format!(" E_Linf={:.3e} E_L2={:.3e}", e.linf, e.l2))
            .unwrap_or_default();
        println!(
            "stage {:>2} width {:>5} estimator {:.3e} residual {:.3e}{err}",
            r.stage, r.width, r.estimator, r.residual_interior
        );
    })
    .map_err(|e| Failure::Numerical(e.into()))?;
    output::write_stages(&opts, &outcome.reports).map_err(Failure::usage)?;
    if opts.fields {
        output::write_fields(&opts, &outcome).map_err(Failure::usage)?;
    }
    println!("wrote {}", opts.dir.display());
    Ok(())
}

fn run_list() {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<22} {:>6} {:>6} {:>6} {:>8} {:>3} {:>14} {:>10} {:>5} {:>8}",
        "problem", "M1", "M2", "M_bd", "lambda", "S", "N_s", "R_s", "N_opt", "lr"
    );
    for name in PRESET_NAMES {
        let Ok(p) = builtin(name) else {
            let _ = writeln!(out, "{name:<22} (failed to build)");
            continue;
        };
        let c = &p.defaults;
        let widths = c.widths.as_ref().map_or_else(
            || format!("{}*2^s", c.width_base),
            |w| {
                w.iter()
                    .map(|n| n.to_string())
                    .collect::<Vec<_>>()
                    .join(",")
            },
        );
        let radius = match (c.radius_slope, c.radius_offset) {
            (a, b) if b == 0.0 => format!("{a}s"),
            (a, b) if b < 0.0 => format!("{a}s-{}", -b),
            (a, b) => format!("{a}s+{b}"),
        };
        let mut line = format!(
            "{name:<22} {:>6} {:>6} {:>6} {:>8} {:>3} {:>14} {:>10} {:>5} {:>8}",
            c.interior_uniform,
            c.interior_adaptive,
            c.boundary_points,
            c.lambda,
            c.stages,
            widths,
            radius,
            c.n_opt,
            c.learning_rate
        );
        if let Some(l) = c.localized {
            line.push_str(&format!(
                "  S1={} S2={} N_L={} R_L={}",
                l.network_stages, l.stages, l.neurons, l.radius
            ));
        }
        if c.knowledge_neurons {
            line.push_str(&format!("  N_k={}", c.knowledge_terms));
        }
        let _ = writeln!(out, "{line}");
    }
    // a closed pipe (e.g. `list | head`) is not an error
    let _ = std::io::stdout().write_all(out.as_bytes());
}

fn run_check(seed: u64) -> Result<(), Failure> {
    let outcomes = checks::run_all(seed).map_err(|e| Failure::Numerical(e.into()))?;
    let mut failed = 0;
    for c in &outcomes {
        let tag = if c.passed { "PASS" } else { "FAIL" };
        println!(
            "{tag} {} (value {:.3e}, tolerance {:.1e})",
            c.name, c.value, c.tolerance
        );
        failed += usize::from(!c.passed);
    }
    if failed > 0 {
        return Err(Failure::Numerical(anyhow!(
            "{failed} of {} checks failed",
            outcomes.len()
        )));
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match &cli.command {
        Command::List => {
            run_list();
            Ok(())
        }
        Command::Solve(args) => run_solve(args),
        Command::Check { seed } => run_check(*seed),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            eprintln!("usage: resbasis <list|solve|check> [options]; see `resbasis --help`");
            ExitCode::from(1)
        }
        Err(Failure::Numerical(e)) => {
            eprintln!("numerical failure: {e:#}");
            ExitCode::from(2)
        }
    }
}
