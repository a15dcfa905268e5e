use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use avl::network_file::{save_network, NetworkFileError};
use avl::scenario::{load_scenario, validate_scenario, Severity};
use avl::{emit_outputs, load_prepared, run_scenario, Overrides};
use avl_core::lane::{LaneGroup, LaneGroupSpec, LaneNetwork};
use avl_core::signal::generate_ca_code;
use clap::{Parser, Subcommand};
use serde::Deserialize;

#[derive(Parser)]
#[command(name = "avl", version, about = "Lane-level vehicle location simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write epochs.csv, summary.json and geometry.json.
    Run {
        scenario: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        no_dgps: bool,
    },
    /// Check a scenario and print diagnostics.
    Validate { scenario: PathBuf },
    /// Build a lane network from parallel-lane group specs (TOML).
    GenNetwork { spec: PathBuf, out: PathBuf },
    /// Print the C/A code of one satellite as a string of chips.
    Codes {
        #[arg(long)]
        prn: u8,
    },
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct NetworkSpec {
    groups: Vec<LaneGroupSpec>,
}

fn gen_network(spec: &Path, out: &Path) -> Result<usize, String> {
    let text = fs::read_to_string(spec).map_err(|e| format!("{}: {e}", spec.display()))?;
    let spec: NetworkSpec = toml::from_str(&text).map_err(|e| format!("{}: {e}", spec.display()))?;
    let mut lanes = Vec::new();
    for (i, g) in spec.groups.into_iter().enumerate() {
        let group = LaneGroup::new(g).map_err(|e| format!("groups[{i}]: {e}"))?;
        lanes.extend(group.lanes().map_err(|e| format!("groups[{i}]: {e}"))?);
    }
    let net = LaneNetwork::new(lanes).map_err(|e| NetworkFileError::from(e).to_string())?;
    save_network(&net, out).map_err(|e| e.to_string())?;
    Ok(net.len())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run {
            scenario,
            out,
            seed,
            no_dgps,
        } => {
            let prepared = match load_prepared(&scenario, Overrides { seed, no_dgps }) {
                Ok(p) => p,
                Err(e) => {
                    eprintln!("{e}");
                    return ExitCode::from(2);
                }
            };
            for w in &prepared.warnings {
                eprintln!("{w}");
            }
            let report = match run_scenario(&prepared) {
                Ok(r) => r,
                Err(e) => {
                    eprintln!("{e}");
                    return ExitCode::FAILURE;
                }
            };
            match emit_outputs(&report, &prepared.network, &out) {
                Ok(paths) => {
                    let a = &report.aggregates;
                    let fmt = |v: Option<f64>| v.map_or("n/a".to_owned(), |v| format!("{v:.3}"));
                    println!(
                        "epochs {} matched {} unmatched {} warm-up {}",
                        a.epochs, a.matched, a.unmatched, a.warmup
                    );
                    println!("lane accuracy {:.2}%", a.lane_accuracy_pct);
                    println!(
                        "horizontal rms: used {} m, corrected {} m, uncorrected {} m",
                        fmt(a.rms_error_m),
                        fmt(a.rms_corrected_m),
                        fmt(a.rms_uncorrected_m)
                    );
                    println!(
                        "corrections sent {} lost {}; mean latency {} s",
                        report.links.corrections_sent,
                        report.links.corrections_lost,
                        fmt(a.mean_latency_s)
                    );
                    println!("wrote {}", paths.epochs_csv.display());
                    println!("wrote {}", paths.summary_json.display());
                    println!("wrote {}", paths.geometry_json.display());
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("{}: {e}", out.display());
                    ExitCode::FAILURE
                }
            }
        }
        Command::Validate { scenario } => {
            let file = match load_scenario(&scenario) {
                Ok(f) => f,
                Err(e) => {
                    eprintln!("{e}");
                    return ExitCode::from(2);
                }
            };
            let diags = validate_scenario(&file);
            for d in &diags {
                println!("{d}");
            }
            if diags.iter().any(|d| d.severity == Severity::Error) {
                ExitCode::from(2)
            } else {
                if diags.is_empty() {
                    println!("ok");
                }
                ExitCode::SUCCESS
            }
        }
        Command::GenNetwork { spec, out } => match gen_network(&spec, &out) {
            Ok(n) => {
                println!("wrote {n} lanes to {}", out.display());
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("{e}");
                ExitCode::FAILURE
            }
        },
        Command::Codes { prn } => match generate_ca_code(prn) {
            Ok(code) => {
                let chips: String = code.chips().iter().map(|&c| if c == 1 { '1' } else { '0' }).collect();
                println!("{chips}");
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("{e}");
                ExitCode::from(2)
            }
        },
    }
}
