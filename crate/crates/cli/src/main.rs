use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use coded_consensus::bitcast;
use coded_consensus::metrics::{self, Status, Verdict};
use coded_consensus::selftest;
use coded_consensus::simnet::engine::{GenerationRecord, Violation};
use coded_consensus::simnet::sweep::verdicts;
use coded_consensus::simnet::{sweep, Scenario, SummaryRow, SweepOutcome};

#[derive(Parser)]
#[command(version, about = "Coded Byzantine consensus simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario file.
    Run {
        #[arg(long)]
        scenario: PathBuf,
        /// Write the report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
        /// Override the scenario's seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Rerun with each of these D values, keeping the generation count.
        #[arg(long, value_delimiter = ',')]
        sweep_d: Vec<usize>,
    },
    /// Run every `.toml` scenario in a directory.
    Sweep {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_delimiter = ',')]
        sweep_d: Vec<usize>,
    },
    /// Closed-form bounds only.
    Predict {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        t: usize,
        /// Bits per generation.
        #[arg(long = "d")]
        value_bits: Option<usize>,
        /// Total input bits.
        #[arg(long = "l")]
        total_bits: usize,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
    },
    /// Built-in oracle checks.
    Selftest {
        /// Random scenarios per network size.
        #[arg(long, default_value_t = 50)]
        random: u64,
    },
}

#[derive(Serialize)]
struct JsonRow<'a> {
    #[serde(flatten)]
    row: &'a SummaryRow,
    verdicts: Vec<Verdict>,
    violations: &'a [Violation],
    generations: &'a [GenerationRecord],
}

fn expand(base: Vec<Scenario>, seed: Option<u64>, sweep_d: &[usize]) -> Vec<Scenario> {
    let mut out = Vec::new();
    for mut s in base {
        if let Some(seed) = seed {
            s.seed = seed;
        }
        if sweep_d.is_empty() {
            out.push(s);
            continue;
        }
        let generations = s.total_bits.checked_div(s.value_bits).unwrap_or(1).max(1);
        for &d in sweep_d {
            let mut v = s.clone();
            v.name = format!("{}-d{d}", s.name);
            v.value_bits = d;
            v.total_bits = d * generations;
            out.push(v);
        }
    }
    out
}

fn load_dir(dir: &Path) -> Result<Vec<Scenario>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("reading {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "toml"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        bail!("no .toml scenarios in {}", dir.display());
    }
    paths
        .iter()
        .map(|p| Scenario::load(p).with_context(|| format!("loading {}", p.display())))
        .collect()
}

fn sink(out: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match out {
        Some(p) => Box::new(io::BufWriter::new(
            fs::File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(io::stdout().lock()),
    })
}

fn report(outcomes: &[SweepOutcome], format: Format, out: &Option<PathBuf>) -> Result<bool> {
    let rows: Vec<SummaryRow> = outcomes.iter().map(SummaryRow::from_outcome).collect();
    let mut w = sink(out)?;
    match format {
        Format::Csv => {
            let mut csv = csv::Writer::from_writer(&mut w);
            for r in &rows {
                csv.serialize(r)?;
            }
            csv.flush()?;
        }
        Format::Json => {
            let docs: Vec<JsonRow> = outcomes
                .iter()
                .zip(&rows)
                .map(|(o, row)| match &o.result {
                    Ok(run) => JsonRow {
                        row,
                        verdicts: verdicts(run),
                        violations: &run.violations,
                        generations: &run.generations,
                    },
                    Err(_) => JsonRow { row, verdicts: Vec::new(), violations: &[], generations: &[] },
                })
                .collect();
            serde_json::to_writer_pretty(&mut w, &docs)?;
            writeln!(w)?;
        }
    }
    w.flush()?;
    Ok(rows.iter().all(SummaryRow::passed))
}

#[derive(Serialize)]
struct Predicted {
    measured_b: metrics::Prediction,
    /// Same formulas with `B = n^2`.
    reference_b: metrics::Prediction,
    optimal_d: Option<usize>,
}

fn predict(n: usize, t: usize, value_bits: Option<usize>, total_bits: usize, format: Format) -> Result<()> {
    let optimal = metrics::optimal_d(n, t, total_bits).ok();
    // an optimal D rarely divides L; the last generation is then padded
    let (d, total_bits) = match (value_bits, optimal) {
        (Some(d), _) => (d, total_bits),
        (None, Some(d)) => (d, total_bits.div_ceil(d) * d),
        (None, None) => bail!("--d is required when t = 0"),
    };
    let b = bitcast::unit_cost(n, t)?;
    let p = Predicted {
        measured_b: metrics::predict(n, t, d, total_bits, b)?,
        reference_b: metrics::predict(n, t, d, total_bits, (n * n) as u64)?,
        optimal_d: optimal,
    };
    let mut out = io::stdout().lock();
    match format {
        Format::Json => {
            serde_json::to_writer_pretty(&mut out, &p)?;
            writeln!(out)?;
        }
        Format::Csv => {
            let mut csv = csv::Writer::from_writer(out);
            csv.write_record(["b_source", "n", "t", "D", "L", "B", "step1", "step3", "step5", "step6", "per_fallback", "max_fallbacks", "total_bound", "asymptote"])?;
            for (label, q) in [("measured", &p.measured_b), ("reference", &p.reference_b)] {
                csv.write_record([
                    label.to_string(),
                    q.n.to_string(),
                    q.t.to_string(),
                    q.value_bits.to_string(),
                    q.total_bits.to_string(),
                    q.b.to_string(),
                    q.step1.to_string(),
                    q.step3.to_string(),
                    q.step5.to_string(),
                    q.step6.to_string(),
                    q.per_fallback.to_string(),
                    q.max_fallbacks.to_string(),
                    q.total_bound.to_string(),
                    format!("{:.6}", q.asymptote),
                ])?;
            }
            csv.flush()?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Run { scenario, out, format, seed, sweep_d } => {
            let base = Scenario::load(&scenario).with_context(|| format!("loading {}", scenario.display()))?;
            let scenarios = expand(vec![base], seed, &sweep_d);
            for s in &scenarios {
                s.validate().with_context(|| format!("scenario {}", s.name))?;
            }
            report(&sweep(scenarios), format, &out)
        }
        Command::Sweep { scenario, out, format, seed, sweep_d } => {
            let scenarios = expand(load_dir(&scenario)?, seed, &sweep_d);
            report(&sweep(scenarios), format, &out)
        }
        Command::Predict { n, t, value_bits, total_bits, format } => {
            predict(n, t, value_bits, total_bits, format)?;
            Ok(true)
        }
        Command::Selftest { random } => {
            let checks = selftest::run(random);
            for c in &checks {
                let tag = match c.status {
                    Status::Pass => "PASS",
                    Status::Fail => "FAIL",
                    Status::Info => "INFO",
                };
                println!("{tag} {}: {}", c.name, c.detail);
            }
            Ok(checks.iter().all(|c| c.status != Status::Fail))
        }
    }
}
