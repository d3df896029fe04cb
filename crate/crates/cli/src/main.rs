use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ks1d::config::Suite;
use ks1d::scenario::load_model;
use ks1d::sweep::parse_axis;
use ks1d::{parse_config, run_scenario, sweep, CliError, RunSummary};
use ks1d_core::{Certifier, EntropyProfile};

#[derive(Parser)]
#[command(name = "ks1d", version, about = "Experiments with the 1D quasilinear Keller-Segel system")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory (default: `output_dir` from the config).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate the blowup certificate at a mass or search for the threshold.
    Certify(CertifyArgs),
    /// Run one of the inequality suites.
    Inequalities {
        #[arg(long)]
        suite: String,
        #[arg(long)]
        delta: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a scenario once per value of one numeric key.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// `key=v1,v2,...`
        #[arg(long)]
        axis: String,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct CertifyArgs {
    #[arg(long, conflicts_with = "table", required_unless_present = "table")]
    alpha: Option<f64>,
    /// Two-column `r,a` CSV with a `# tail_exponent=<p>` line.
    #[arg(long)]
    table: Option<PathBuf>,
    #[arg(long)]
    q: f64,
    #[arg(long, conflicts_with = "search")]
    mass: Option<f64>,
    /// `min:max` mass range for the threshold search.
    #[arg(long)]
    search: Option<String>,
    /// Fixed `eps` instead of `M^(1-q)`.
    #[arg(long)]
    eps: Option<f64>,
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

fn report(summary: &RunSummary) {
    let outcome = summary
        .outcome
        .map(|o| format!("{o:?}"))
        .or_else(|| summary.certificate.as_ref().map(|c| format!("certified = {} at M = {}", c.certified, c.mass)))
        .unwrap_or_else(|| "done".into());
    println!(
        "{}: {outcome}; violations {}; {:.2} s",
        summary.scenario,
        summary.violations.total(),
        summary.wall_time_s
    );
    for a in &summary.artifacts {
        println!("  {}", a.display());
    }
}

fn certify(args: &CertifyArgs) -> Result<i32, CliError> {
    let mut text = format!("scenario = certificate\nq = {}\n", args.q);
    match (&args.alpha, &args.table) {
        (Some(a), _) => text += &format!("alpha = {a}\n"),
        (None, Some(t)) => text += &format!("diffusion_table = {}\n", t.display()),
        (None, None) => return Err(CliError::Usage("give --alpha or --table".into())),
    }
    let config = parse_config(&text)?;
    let model = load_model(&config)?;
    let mut c = Certifier::new(&model, EntropyProfile::new(&model)?, args.q)?;
    c.eps_override = args.eps;
    let json = if let Some(m) = args.mass {
        serde_json::to_string_pretty(&c.certify(m)?)?
    } else {
        let (lo, hi) = match &args.search {
            Some(range) => {
                let (a, b) = range
                    .split_once(':')
                    .ok_or_else(|| CliError::Usage(format!("--search `{range}` is not min:max")))?;
                let parse = |s: &str| {
                    s.trim()
                        .parse::<f64>()
                        .map_err(|_| CliError::Usage(format!("--search bound `{s}` is not a number")))
                };
                (parse(a)?, parse(b)?)
            }
            None => (config.search_min, config.search_max),
        };
        let search = c.search_threshold(lo, hi, 1e-10)?;
        match search.m0() {
            Some(m0) => {
                let mut r = c.certify(m0)?;
                r.m0_search_trace = Some(search.trace);
                serde_json::to_string_pretty(&r)?
            }
            None => serde_json::to_string_pretty(&search)?,
        }
    };
    println!("{json}");
    Ok(0)
}

fn execute(cli: Cli) -> Result<i32, CliError> {
    match cli.command {
        Command::Run { config, out } => {
            let parsed = parse_config(&read(&config)?)?;
            let dir = out.unwrap_or_else(|| parsed.output_dir.clone());
            let summary = run_scenario(&parsed, &dir)?;
            report(&summary);
            Ok(summary.exit_code())
        }
        Command::Certify(args) => certify(&args),
        Command::Inequalities { suite, delta, seed, out } => {
            let parsed_suite: Suite = suite.parse().map_err(CliError::Usage)?;
            let mut text = format!("scenario = inequalities\nsuite = {parsed_suite}\n");
            if let Some(d) = delta {
                text += &format!("delta = {d}\n");
            }
            if let Some(s) = seed {
                text += &format!("seed = {s}\n");
            }
            let config = parse_config(&text)?;
            let dir = out.unwrap_or_else(|| config.output_dir.join(format!("inequalities-{parsed_suite}")));
            let summary = run_scenario(&config, &dir)?;
            if let Some(sweep) = &summary.lemma4 {
                println!(
                    "lemma4: delta = {}, violated = {}, fitted exponent {:?}",
                    sweep.delta, sweep.violated, sweep.fitted_exponent
                );
            }
            report(&summary);
            Ok(summary.exit_code())
        }
        Command::Sweep { config, axis, jobs, out } => {
            let template = read(&config)?;
            let (key, values) = parse_axis(&axis)?;
            let dir = match out {
                Some(d) => d,
                None => parse_config(&template)?.output_dir.join(format!("sweep-{key}")),
            };
            let index = sweep(&template, &key, &values, jobs, &dir)?;
            for e in &index.entries {
                match &e.error {
                    Some(err) => println!("{key} = {}: error: {err}", e.value),
                    None => println!(
                        "{key} = {}: {:?}, violations {}",
                        e.value,
                        e.outcome,
                        e.violations.unwrap_or(0)
                    ),
                }
            }
            println!("  {}", dir.join("index.json").display());
            Ok(index.exit_code())
        }
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
