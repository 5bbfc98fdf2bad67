use std::path::{Path, PathBuf};
use std::process::ExitCode;

use bicontact_lab::{examples, run_scenario, RunError, Scenario, CHECK_FAILURE};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "bicontact-lab", version, about = "Run bi-contact verification scenarios")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file (or the name of a shipped example).
    Run {
        scenario: String,
        /// Write the JSON report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write the checks as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Worker threads for grid scans and sweeps.
        #[arg(long, env = "BICONTACT_LAB_THREADS")]
        threads: Option<usize>,
    },
    /// List the shipped example scenarios.
    ListExamples,
}

fn load(arg: &str) -> Result<Scenario, RunError> {
    let path = Path::new(arg);
    if path.exists() {
        return Scenario::from_path(path);
    }
    match examples::find(arg) {
        Some(src) => Scenario::from_toml(src),
        None => Err(RunError::Parse(format!("no such file or shipped example: {arg}"))),
    }
}

fn run(scenario: &str, out: Option<PathBuf>, csv: Option<PathBuf>, threads: Option<usize>) -> Result<i32, RunError> {
    if let Some(n) = threads {
        if n == 0 {
            return Err(RunError::Precondition("threads must be at least 1".into()));
        }
        // Only fails if a pool already exists, which cannot happen here.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let report = run_scenario(load(scenario)?)?;
    match &out {
        Some(p) => report.write_json(p)?,
        None => println!("{}", report.to_json()),
    }
    if let Some(p) = &csv {
        report.write_csv(p)?;
    }
    let failed: Vec<_> = report.failures().collect();
    if failed.is_empty() {
        eprintln!("all {} checks passed", report.checks.len());
        return Ok(0);
    }
    for c in failed.iter().take(10) {
        let witness = c.witness.as_ref().map(|w| format!(" at {w:?}")).unwrap_or_default();
        eprintln!("FAILED {}: margin {:e} <= threshold {:e}{witness}", c.name, c.margin, c.threshold);
    }
    if failed.len() > 10 {
        eprintln!("... and {} more", failed.len() - 10);
    }
    Ok(CHECK_FAILURE)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::ListExamples => {
            for (name, src) in examples::EXAMPLES {
                // Read the description without validating: some examples are
                // malformed on purpose.
                let desc = src
                    .parse::<toml::Table>()
                    .ok()
                    .and_then(|t| t.get("description").and_then(|d| d.as_str()).map(str::to_owned))
                    .unwrap_or_default();
                println!("{name:32} {desc}");
            }
            0
        }
        Command::Run { scenario, out, csv, threads } => run(&scenario, out, csv, threads).unwrap_or_else(|e| {
            eprintln!("error: {e}");
            e.exit_code()
        }),
    };
    ExitCode::from(code as u8)
}
