use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use mspe_cli::config::Mode;
use mspe_cli::{check, execute, load_config, CliError, EXIT_OK};
use mspe_core::permengine::{alpha_large_d, alpha_large_t, solve_alpha_finite_t, sparse_alpha, AlphaCoefficients};
use serde_json::Value;

#[derive(Parser)]
#[command(name = "mspe", version, about = "Mixed-state projected ensemble experiments")]
struct Cli {
    /// Cap on worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// JSON experiment config.
    config: PathBuf,
    /// Master seed; overrides the config and MSPE_SEED.
    #[arg(long, env = "MSPE_SEED")]
    seed: Option<u64>,
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long)]
    realizations: Option<usize>,
    /// Override a top-level scalar field, e.g. `--set N=10`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Distance,
    Entropy,
    Spectrum,
}

#[derive(Clone, Copy, ValueEnum)]
enum Limit {
    FiniteT,
    LargeT,
    LargeD,
    Sparse,
}

#[derive(Subcommand)]
enum Command {
    /// Moment distance to the reference ensemble over the sweep.
    Distance(RunArgs),
    /// Annealed conditional entropy with the reference qudit.
    Entropy(RunArgs),
    /// Pooled eigenvalue histograms of the conditional states.
    Spectrum(RunArgs),
    /// Dump a table of permutation coefficients as JSON.
    Alpha {
        #[arg(long, value_enum, default_value = "large-t")]
        limit: Limit,
        #[arg(long, default_value_t = 2)]
        d: usize,
        #[arg(long, default_value_t = 2)]
        m: usize,
        #[arg(long, default_value_t = 2)]
        k: usize,
        /// Depth for the finite-t limit.
        #[arg(long)]
        t: Option<usize>,
        /// Number of lost pairs for the sparse limit.
        #[arg(long, default_value_t = 1)]
        pairs: usize,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Check a config without running it.
    Validate {
        config: PathBuf,
        #[arg(long = "for", value_enum, default_value = "distance")]
        mode: ModeArg,
    },
}

fn parse_set(s: &str) -> Result<(String, Value), CliError> {
    let (k, v) = s.split_once('=').ok_or_else(|| {
        CliError::Core(mspe_core::MspeError::Argument(format!(
            "--set expects KEY=VALUE, got '{s}'"
        )))
    })?;
    let value = serde_json::from_str(v).unwrap_or_else(|_| Value::String(v.to_string()));
    Ok((k.to_string(), value))
}

fn overrides(args: &RunArgs) -> Result<Vec<(String, Value)>, CliError> {
    let mut out: Vec<(String, Value)> = args.set.iter().map(|s| parse_set(s)).collect::<Result<_, _>>()?;
    if let Some(seed) = args.seed {
        out.push(("seed".into(), Value::from(seed)));
    }
    if let Some(o) = &args.output {
        out.push(("output".into(), Value::from(o.to_string_lossy().into_owned())));
    }
    if let Some(r) = args.realizations {
        out.push(("n_realizations".into(), Value::from(r)));
    }
    Ok(out)
}

fn alpha_table(
    limit: Limit,
    d: usize,
    m: usize,
    k: usize,
    t: Option<usize>,
    pairs: usize,
) -> Result<AlphaCoefficients, CliError> {
    Ok(match limit {
        Limit::FiniteT => {
            let t =
                t.ok_or_else(|| CliError::Core(mspe_core::MspeError::Argument("--limit finite-t needs --t".into())))?;
            solve_alpha_finite_t(t, m, d, k)?
        }
        Limit::LargeT => alpha_large_t(m, d, k)?,
        Limit::LargeD => alpha_large_d(m, d, k)?,
        Limit::Sparse => sparse_alpha(pairs, d, k)?,
    })
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        // only fails if a pool already exists, which cannot happen here
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
    let mode_of = |m: ModeArg| match m {
        ModeArg::Distance => Mode::Distance,
        ModeArg::Entropy => Mode::Entropy,
        ModeArg::Spectrum => Mode::Spectrum,
    };
    let (args, mode, name) = match cli.command {
        Command::Distance(a) => (a, Mode::Distance, "distance"),
        Command::Entropy(a) => (a, Mode::Entropy, "entropy"),
        Command::Spectrum(a) => (a, Mode::Spectrum, "spectrum"),
        Command::Alpha {
            limit,
            d,
            m,
            k,
            t,
            pairs,
            output,
        } => {
            let table = alpha_table(limit, d, m, k, t, pairs)?;
            let text = serde_json::to_string_pretty(&table.to_json()).expect("table serializes") + "\n";
            match output {
                Some(p) => {
                    mspe_cli::output::write_atomic(&p, &text).map_err(|source| CliError::Io { path: p, source })?
                }
                None => print!("{text}"),
            }
            return Ok(());
        }
        Command::Validate { config, mode } => {
            let (cfg, raw) = load_config(&config, &[])?;
            check(&cfg, Some(&raw), mode_of(mode))?;
            println!("{}: ok", config.display());
            return Ok(());
        }
    };
    let (cfg, raw) = load_config(&args.config, &overrides(&args)?)?;
    let out = execute(&cfg, Some(&raw), mode, name)?;
    eprintln!("wrote {}", out.display());
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::from(EXIT_OK as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
