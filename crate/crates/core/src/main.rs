use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use sparse_dfrc::scenario::parse_scenario;
use sparse_dfrc::workflow::{
    run_ber, run_ber_angle, run_design, run_oracle, run_pattern, run_restart_histogram, RunOptions,
};
use sparse_dfrc::Error;

#[derive(Parser)]
#[command(
    name = "dfrc",
    version,
    about = "Sparse transmit array design for radar-communication"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Select the array and design its beamformers.
    Design(Common),
    /// Evaluate stored weights on a uniform angular grid.
    Pattern {
        #[command(flatten)]
        common: Common,
        /// Grid spacing in degrees.
        #[arg(long, default_value_t = 0.1)]
        step: f64,
    },
    /// Bit error rate versus SNR for a stored design.
    Ber(Common),
    /// Bit error rate versus receiver direction for a stored design.
    BerAngle(Common),
    /// PSL of independent starts with and without the swap rule.
    Histogram(Common),
    /// Exhaustive search over all subsets (small grids only).
    Oracle(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    scenario: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    starts: Option<usize>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

const EXIT_CONFIG: u8 = 2;
const EXIT_INFEASIBLE: u8 = 3;
const EXIT_NOT_CONVERGED: u8 = 4;

fn print_summary(format: Format, rows: &[(&str, Value)]) {
    match format {
        Format::Json => {
            let map: serde_json::Map<String, Value> = rows.iter().map(|(k, v)| (k.to_string(), v.clone())).collect();
            println!("{}", serde_json::to_string_pretty(&Value::Object(map)).unwrap());
        }
        Format::Csv => {
            println!("key,value");
            for (k, v) in rows {
                let v = match v {
                    Value::String(s) => s.clone(),
                    other => other.to_string(),
                };
                println!("{k},{v}");
            }
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::Json(_) | Error::Domain(_) | Error::Dimension { .. } => EXIT_CONFIG,
        Error::Infeasible(_) => EXIT_INFEASIBLE,
        Error::Solver(_) | Error::Io(_) => 1,
    }
}

fn run(cli: Cli) -> Result<u8, Error> {
    let common = match &cli.command {
        Command::Design(c) | Command::Ber(c) | Command::BerAngle(c) | Command::Histogram(c) | Command::Oracle(c) => c,
        Command::Pattern { common, .. } => common,
    };
    let opts = RunOptions {
        seed: common.seed,
        starts: common.starts,
        trials: common.trials,
    };
    let scenario = opts.apply(&parse_scenario(&common.scenario)?)?;
    let out = &common.out;
    let format = common.format;

    match &cli.command {
        Command::Design(_) => {
            let o = run_design(&scenario, out)?;
            let mut rows = vec![
                ("scenario", json!(scenario.name)),
                ("selection", json!(o.result.selection.to_bit_string())),
                ("alpha", json!(o.result.alpha)),
                ("selection_psl_db", json!(o.result.psl_db)),
                ("converged", json!(o.converged())),
            ];
            let keys: Vec<(String, Value)> = o
                .metrics
                .iter()
                .flat_map(|m| {
                    [
                        (format!("{}_psl_db", m.label), json!(m.psl_db)),
                        (format!("{}_comm_gain", m.label), json!(m.comm_gain)),
                        (format!("{}_hpbw_deg", m.label), json!(m.hpbw_deg)),
                        (format!("{}_ripple_db", m.label), json!(m.ripple_db)),
                        (format!("{}_aperture_efficiency", m.label), json!(m.aperture_efficiency)),
                    ]
                })
                .collect();
            rows.extend(keys.iter().map(|(k, v)| (k.as_str(), v.clone())));
            print_summary(format, &rows);
            return Ok(if o.converged() { 0 } else { EXIT_NOT_CONVERGED });
        }
        Command::Pattern { step, .. } => {
            let m = run_pattern(&scenario, out, *step)?;
            let files: Vec<&str> = m.files.iter().map(|f| f.path.as_str()).collect();
            print_summary(format, &[("files", json!(files))]);
        }
        Command::Ber(_) => {
            let (curves, _) = run_ber(&scenario, out)?;
            let rows: Vec<(String, Value)> = curves
                .iter()
                .map(|c| {
                    (
                        format!("snr_db_at_1e-3_{}bits", c.bits_per_pulse),
                        json!(c.crossing(1e-3)),
                    )
                })
                .collect();
            let rows: Vec<(&str, Value)> = rows.iter().map(|(k, v)| (k.as_str(), v.clone())).collect();
            print_summary(format, &rows);
        }
        Command::BerAngle(_) => {
            let (c, _) = run_ber_angle(&scenario, out)?;
            let (i, best) =
                c.ber
                    .iter()
                    .copied()
                    .enumerate()
                    .fold((0, f64::INFINITY), |b, (i, x)| if x < b.1 { (i, x) } else { b });
            print_summary(
                format,
                &[("min_ber", json!(best)), ("min_ber_angle_deg", json!(c.x[i]))],
            );
        }
        Command::Histogram(_) => {
            let n = common.starts.unwrap_or(scenario.selection.restarts);
            let (h, _) = run_restart_histogram(&scenario, n, out)?;
            print_summary(
                format,
                &[
                    ("starts", json!(n)),
                    ("swap_spread_db", json!(h.swap_spread())),
                    ("plain_spread_db", json!(h.plain_spread())),
                    ("swap_within_1db", json!(h.swap_within(1.0))),
                ],
            );
        }
        Command::Oracle(_) => {
            let (b, _) = run_oracle(&scenario, out)?;
            print_summary(
                format,
                &[
                    ("subsets", json!(b.subsets)),
                    ("alpha", json!(b.alpha)),
                    ("psl_db", json!(b.psl_db)),
                    ("selection", json!(b.selection.to_bit_string())),
                ],
            );
        }
    }
    Ok(0)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_CONFIG } else { 0 });
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
