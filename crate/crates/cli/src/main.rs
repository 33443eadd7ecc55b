//! `mqka` - command-line driver for the multiparty quantum key agreement
//! simulator.
//!
//! Exit codes: 0 on success, 1 on usage/configuration errors, 2 when a
//! security property asserted by a scenario file is violated.

use std::collections::BTreeSet;
use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand, ValueEnum};
use num_rational::Ratio;

use mqka_core::harness::{
    analyze_attack, emit_report, parse_grid, parse_scenario, run_scenario, sweep, AttackRunOptions,
    ReportFormat, ReportRow, Scenario, VerdictAggregate,
};
use mqka_core::key::Key;
use mqka_core::protocol::{cabello_efficiency, qubit_efficiency};
use mqka_core::{adversary, Error};

#[derive(Parser)]
#[command(
    name = "mqka",
    version,
    about = "Deterministic circle-type multiparty quantum key agreement simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Override the master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Override the repetition count.
    #[arg(long, global = true)]
    reps: Option<usize>,

    /// Report format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,

    /// Write output to a file instead of standard output.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Override the per-hop decoy mismatch threshold (fraction in [0, 1)).
    #[arg(long, global = true)]
    threshold: Option<f64>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

impl From<Format> for ReportFormat {
    fn from(f: Format) -> ReportFormat {
        match f {
            Format::Json => ReportFormat::JsonLines,
            Format::Csv => ReportFormat::Csv,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file and emit its report row.
    Run { scenario: PathBuf },
    /// Expand a grid file and run every point.
    Sweep { grid: PathBuf },
    /// Analyze a coalition placement (oracle plus simulations).
    Attack {
        /// Participant count.
        #[arg(long)]
        n: usize,
        /// Sub-circles per owner.
        #[arg(long)]
        t: usize,
        /// Comma-separated coalition member indices.
        #[arg(long)]
        members: String,
        /// Expected key as hex; its length fixes the key length.
        #[arg(long)]
        expected: String,
        /// Decoys inserted per hop in the simulated runs.
        #[arg(long, default_value_t = 4)]
        decoys: usize,
    },
    /// Print qubit efficiency for a configuration.
    Efficiency {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        t: usize,
        /// Detection rate as `p/q` or an integer.
        #[arg(long)]
        kappa: String,
    },
    /// Print the favorable two-member ring distances for the baseline
    /// protocol.
    Positions {
        #[arg(long)]
        n: usize,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err)
            if matches!(
                err.kind(),
                ErrorKind::DisplayHelp
                    | ErrorKind::DisplayVersion
                    | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand
            ) =>
        {
            let _ = err.print();
            return ExitCode::SUCCESS;
        }
        Err(err) => {
            let _ = err.print();
            return ExitCode::from(1);
        }
    };
    match dispatch(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(1)
        }
    }
}

fn dispatch(cli: Cli) -> Result<ExitCode, Error> {
    let format: ReportFormat = cli.format.into();
    match &cli.command {
        Command::Run { scenario } => {
            let text = fs::read_to_string(scenario)?;
            let mut scenario = parse_scenario(&text)?;
            apply_overrides(&mut scenario, &cli)?;
            let aggregate = run_scenario(&scenario)?;
            let row = ReportRow::from_aggregate(&scenario, &aggregate);
            write_output(cli.out.as_deref(), &emit_report(&[row], format)?)?;
            if let Some(message) = violated_assertion(&scenario, &aggregate) {
                eprintln!("security assertion violated: {message}");
                return Ok(ExitCode::from(2));
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Sweep { grid } => {
            let text = fs::read_to_string(grid)?;
            let mut grid = parse_grid(&text)?;
            if let Some(seed) = cli.seed {
                grid.seed = seed;
            }
            if let Some(reps) = cli.reps {
                grid.repetitions = reps;
            }
            if let Some(threshold) = cli.threshold {
                grid.error_threshold = threshold;
            }
            let rows = sweep(&grid)?;
            write_output(cli.out.as_deref(), &emit_report(&rows, format)?)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Attack {
            n,
            t,
            members,
            expected,
            decoys,
        } => {
            let members: BTreeSet<usize> = members
                .split(',')
                .map(|part| {
                    part.trim()
                        .parse::<usize>()
                        .map_err(|_| Error::Usage(format!("bad member index `{part}`")))
                })
                .collect::<Result<_, _>>()?;
            let expected = Key::from_hex(expected)?;
            let options = AttackRunOptions {
                repetitions: cli.reps.unwrap_or(100),
                seed: cli.seed.unwrap_or(0),
                decoys_per_hop: *decoys,
                error_threshold: cli.threshold.unwrap_or(0.0),
            };
            let analysis = analyze_attack(*n, *t, members, expected, &options)?;
            let bytes = match format {
                ReportFormat::JsonLines => analysis.to_json_line(),
                ReportFormat::Csv => analysis.to_csv(),
            };
            write_output(cli.out.as_deref(), &bytes)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Efficiency { n, t, kappa } => {
            if *n < 2 || *t < 1 {
                return Err(Error::Usage("efficiency requires n >= 2 and t >= 1".into()));
            }
            let kappa = parse_ratio(kappa)?;
            let eta = qubit_efficiency(*n, *t, kappa);
            // Cross-check through Cabello's measure with the protocol's
            // qubit accounting.
            let bits = *kappa.denom();
            let qubits = (*t * *n) as u64 * (bits + *kappa.numer());
            debug_assert_eq!(cabello_efficiency(bits, qubits, 0)?, eta);
            let decimal = |r: Ratio<u64>| *r.numer() as f64 / *r.denom() as f64;
            let bytes = match format {
                ReportFormat::JsonLines => {
                    let mut v = serde_json::to_vec(&serde_json::json!({
                        "n": n,
                        "t": t,
                        "kappa": kappa.to_string(),
                        "kappa_decimal": decimal(kappa),
                        "qubit_efficiency": eta.to_string(),
                        "qubit_efficiency_decimal": decimal(eta),
                    }))
                    .expect("efficiency serializes");
                    v.push(b'\n');
                    v
                }
                ReportFormat::Csv => format!(
                    "n,t,kappa,kappa_decimal,qubit_efficiency,qubit_efficiency_decimal\n{},{},{},{},{},{}\n",
                    n,
                    t,
                    kappa,
                    decimal(kappa),
                    eta,
                    decimal(eta)
                )
                .into_bytes(),
            };
            write_output(cli.out.as_deref(), &bytes)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Positions { n } => {
            if *n < 2 {
                return Err(Error::Usage("positions requires n >= 2".into()));
            }
            let distances: Vec<usize> = adversary::liu_distance_set(*n).into_iter().collect();
            let bytes = match format {
                ReportFormat::JsonLines => {
                    let mut v = serde_json::to_vec(&serde_json::json!({
                        "n": n,
                        "distances": distances,
                    }))
                    .expect("positions serialize");
                    v.push(b'\n');
                    v
                }
                ReportFormat::Csv => {
                    let joined: Vec<String> =
                        distances.iter().map(ToString::to_string).collect();
                    format!("n,distances\n{},{}\n", n, joined.join(";")).into_bytes()
                }
            };
            write_output(cli.out.as_deref(), &bytes)?;
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn apply_overrides(scenario: &mut Scenario, cli: &Cli) -> Result<(), Error> {
    if let Some(seed) = cli.seed {
        scenario.config.seed = seed;
    }
    if let Some(reps) = cli.reps {
        scenario.repetitions = reps;
    }
    if let Some(threshold) = cli.threshold {
        scenario.config.error_threshold = threshold;
    }
    scenario.validate()
}

/// Check the scenario's assertion keys against the aggregate; returns a
/// description of the first violated one.
fn violated_assertion(scenario: &Scenario, aggregate: &VerdictAggregate) -> Option<String> {
    let asserts = &scenario.assertions;
    if let Some(expected) = asserts.honest_agreement {
        if (aggregate.honest_agreement_rate - expected).abs() > 1e-12 {
            return Some(format!(
                "honest_agreement_rate = {}, asserted {expected}",
                aggregate.honest_agreement_rate
            ));
        }
    }
    if let Some(expected) = asserts.coalition_success {
        let holds = aggregate
            .coalition_success_rate
            .is_some_and(|actual| (actual - expected).abs() <= 1e-12);
        if !holds {
            return Some(format!(
                "coalition_success_rate = {:?}, asserted {expected}",
                aggregate.coalition_success_rate
            ));
        }
    }
    if asserts.detection_free == Some(true) && aggregate.mean_detection_events != 0.0 {
        return Some(format!(
            "mean_detection_events = {}, asserted detection-free",
            aggregate.mean_detection_events
        ));
    }
    None
}

fn parse_ratio(text: &str) -> Result<Ratio<u64>, Error> {
    let parse_int = |s: &str| {
        s.trim()
            .parse::<u64>()
            .map_err(|_| Error::Usage(format!("`{s}` is not a non-negative integer")))
    };
    match text.split_once('/') {
        Some((num, den)) => {
            let den = parse_int(den)?;
            if den == 0 {
                return Err(Error::Usage("kappa denominator must be nonzero".into()));
            }
            Ok(Ratio::new(parse_int(num)?, den))
        }
        None => Ok(Ratio::from_integer(parse_int(text)?)),
    }
}

fn write_output(path: Option<&std::path::Path>, bytes: &[u8]) -> Result<(), Error> {
    match path {
        Some(path) => fs::write(path, bytes)?,
        None => std::io::stdout().write_all(bytes)?,
    }
    Ok(())
}
