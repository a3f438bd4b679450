use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use brwlab::diagrams::{run_diagram_request, DiagramRequest, DiagramResponse};
use brwlab::experiment::{run_manifest, ExperimentManifest, Task, TaskOutcome};
use brwlab::moments::{run_moment_job, MomentJob};
use brwlab::skeletons::enumerate_skeletons;
use brwlab::validation::{run_all, Profile};
use brwlab::{LabError, Result};
use clap::{Parser, Subcommand};
use serde::Serialize;

const VERSION: &str = env!("BRWLAB_VERSION");

#[derive(Parser)]
#[command(name = "brwlab", version = VERSION, about = "Local times of critical branching random walk on Z^d")]
struct Cli {
    /// Worker threads for Monte Carlo and lattice sums (default: all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Enumerate k-skeletons and print their counts.
    Skeletons {
        #[arg(long, default_value_t = 0)]
        k_min: usize,
        #[arg(long)]
        k_max: usize,
        /// Also print every canonical encoding.
        #[arg(long)]
        encodings: bool,
    },
    /// Evaluate a JSON diagram request (or an array of them).
    Diagrams {
        request: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Exact moments from the diagram engine, with optional Monte Carlo alongside.
    Moments {
        job: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run every task of a TOML experiment manifest into a run directory.
    Simulate {
        manifest: PathBuf,
        #[arg(long, default_value = "runs")]
        out_dir: PathBuf,
    },
    /// Run only the tail tasks of a manifest and print their fits.
    Tails {
        manifest: PathBuf,
        #[arg(long, default_value = "runs")]
        out_dir: PathBuf,
    },
    /// Run the acceptance suite.
    Validate {
        #[arg(default_value = "quick")]
        profile: String,
        /// Comma-separated criterion ids.
        #[arg(long, value_delimiter = ',')]
        only: Vec<u32>,
        /// Write the JSON report here.
        #[arg(long)]
        report: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(workers) = cli.workers {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(workers).build_global() {
            return fail(&LabError::Config(format!("worker pool: {e}")));
        }
    }
    match run(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => fail(&e),
    }
}

/// Machine-readable diagnostic on stderr.
fn fail(e: &LabError) -> ExitCode {
    let kind = match e {
        LabError::Config(_) => "config",
        LabError::Domain(_) => "domain",
        LabError::Resource(_) => "resource",
        LabError::Precision(_) => "precision",
        LabError::Validation(_) => "validation",
        LabError::Divergence(_) => "divergence",
        LabError::Fit(_) => "fit",
        LabError::Io(_) => "io",
        LabError::Json(_) => "json",
    };
    let code = e.exit_code();
    eprintln!("{}", serde_json::json!({ "error": kind, "message": e.to_string(), "exit_code": code }));
    ExitCode::from(code as u8)
}

fn emit<T: Serialize>(value: &T, out: Option<&Path>) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    match out {
        Some(path) => fs::write(path, text + "\n")?,
        None => println!("{text}"),
    }
    Ok(())
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| LabError::Config(format!("{}: {e}", path.display())))
}

fn run(command: Command) -> Result<bool> {
    match command {
        Command::Skeletons { k_min, k_max, encodings } => {
            if k_min > k_max {
                return Err(LabError::Config(format!("k_min {k_min} exceeds k_max {k_max}")));
            }
            for k in k_min..=k_max {
                let set = enumerate_skeletons(k)?;
                println!("k={k} count={} injective={}", set.len(), set.injective_indices().len());
                if encodings {
                    for s in set.items() {
                        println!("  {}", s.encoding());
                    }
                }
            }
            Ok(true)
        }
        Command::Diagrams { request, out } => {
            let text = read(&request)?;
            let requests: Vec<DiagramRequest> = match serde_json::from_str(&text) {
                Ok(many) => many,
                Err(_) => vec![serde_json::from_str(&text)?],
            };
            let responses: Vec<DiagramResponse> = requests.iter().map(run_diagram_request).collect::<Result<_>>()?;
            emit(&responses, out.as_deref())?;
            Ok(responses.iter().all(DiagramResponse::passed))
        }
        Command::Moments { job, out } => {
            let job: MomentJob = serde_json::from_str(&read(&job)?)?;
            emit(&run_moment_job(&job)?, out.as_deref())?;
            Ok(true)
        }
        Command::Simulate { manifest, out_dir } => {
            let manifest = ExperimentManifest::from_toml(&read(&manifest)?)?;
            let summary = run_manifest(&manifest, &out_dir, VERSION)?;
            println!("run {} -> {}", summary.hash, summary.run_dir.display());
            let mut pass = true;
            for r in &summary.records {
                if let TaskOutcome::Survival { kolmogorov: Some(k), .. } = &r.outcome {
                    println!("task {}: Kolmogorov deviation {:.4} ({})", r.task_index, k.final_deviation, if k.pass { "PASS" } else { "FAIL" });
                    pass &= k.pass;
                }
            }
            Ok(pass)
        }
        Command::Tails { manifest, out_dir } => {
            let mut manifest = ExperimentManifest::from_toml(&read(&manifest)?)?;
            manifest.tasks.retain(|t| matches!(t, Task::Tail { .. }));
            if manifest.tasks.is_empty() {
                return Err(LabError::Config("the manifest has no tail tasks".into()));
            }
            // the filtered manifest hashes differently, so drop a stored hash
            manifest.config_hash = None;
            let summary = run_manifest(&manifest, &out_dir, VERSION)?;
            let fits: Vec<_> = summary.records.iter().map(|r| &r.outcome).collect();
            let text = serde_json::to_string_pretty(&fits)?;
            fs::write(summary.run_dir.join("fits.json"), &text)?;
            println!("{text}");
            eprintln!("plot data in {}", summary.run_dir.display());
            Ok(true)
        }
        Command::Validate { profile, only, report } => {
            let profile: Profile = profile.parse()?;
            let reports = run_all(profile, &only, |r| {
                println!(
                    "criterion {:>2} {} ({:.1}s) {}: {} [{}]",
                    r.id,
                    if r.pass { "PASS" } else { "FAIL" },
                    r.seconds,
                    r.title,
                    r.detail,
                    r.producer
                );
            });
            if let Some(path) = report {
                emit(&serde_json::json!({ "version": VERSION, "profile": profile, "criteria": reports }), Some(&path))?;
            }
            let failed = reports.iter().filter(|r| !r.pass).count();
            println!("validate: {} passed, {failed} failed", reports.len() - failed);
            Ok(failed == 0)
        }
    }
}
