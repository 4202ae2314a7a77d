use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rayon::prelude::*;

use podilqr::checks;
use podilqr::harness::{
    comparison_arms, export_run, observation_name, run_scenario_with, summarize, write_compare,
    write_summary, DatasetDumper, ExperimentConfig, RunRecord,
};
use podilqr::optimizer::{NoObserver, TerminationReason};
use podilqr::Error;

const EXIT_OK: u8 = 0;
const EXIT_FAILURE: u8 = 1;
const EXIT_MAX_ITERATIONS: u8 = 2;
const EXIT_DIVERGENCE: u8 = 3;

#[derive(Parser, Debug)]
#[command(
    name = "podilqr",
    version,
    about = "Data-driven iLQR experiments on simulated plants"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args, Debug)]
struct Common {
    /// Experiment config file.
    #[arg(long)]
    config: PathBuf,
    /// Run only this seed instead of the config's seed list.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory. Takes precedence over the config and PODILQR_OUTPUT_DIR.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write each iteration's identification data under `datasets/`.
    #[arg(long)]
    dump_datasets: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// One scenario, one seed.
    Run(Common),
    /// One scenario over every seed, plus summary.csv.
    Ensemble(Common),
    /// All comparison arms for the configured plant, plus compare.csv.
    Compare(Common),
    /// Oracle checks: ARMA fit, Riccati vs DARE, gradient.
    Check {
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() {
                EXIT_FAILURE
            } else {
                EXIT_OK
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let code = match cli.command {
        Command::Run(args) => with_config(&args, |config| run(config, &args)),
        Command::Ensemble(args) => with_config(&args, |config| ensemble(config, &args)),
        Command::Compare(args) => with_config(&args, |config| compare(config, &args)),
        Command::Check { seed } => check(seed),
    };
    ExitCode::from(code)
}

fn with_config(args: &Common, body: impl FnOnce(ExperimentConfig) -> Result<u8, Error>) -> u8 {
    let result = ExperimentConfig::load(&args.config).and_then(|mut config| {
        if let Some(out) = &args.out {
            config.output_dir = out.clone();
        }
        if let Some(seed) = args.seed {
            config.seeds = vec![seed];
        }
        body(config)
    });
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            error_code(&e)
        }
    }
}

fn error_code(e: &Error) -> u8 {
    if e.is_divergence() {
        EXIT_DIVERGENCE
    } else {
        EXIT_FAILURE
    }
}

fn termination_code(t: TerminationReason) -> u8 {
    match t {
        TerminationReason::MaxIterations => EXIT_MAX_ITERATIONS,
        _ => EXIT_OK,
    }
}

/// Config and other errors beat divergence, which beats hitting the iteration cap.
fn worst(codes: impl IntoIterator<Item = u8>) -> u8 {
    let rank = |c: u8| match c {
        EXIT_FAILURE => 3,
        EXIT_DIVERGENCE => 2,
        EXIT_MAX_ITERATIONS => 1,
        _ => 0,
    };
    codes
        .into_iter()
        .max_by_key(|&c| rank(c))
        .unwrap_or(EXIT_OK)
}

fn run_one(
    config: &ExperimentConfig,
    seed: u64,
    dir: &Path,
    dump: bool,
) -> Result<RunRecord, Error> {
    let record = if dump {
        let mut dumper = DatasetDumper::new(dir.join("datasets"));
        let record = run_scenario_with(config, seed, &mut dumper)?;
        dumper.finish()?;
        record
    } else {
        run_scenario_with(config, seed, &mut NoObserver)?
    };
    export_run(dir, &record, config.record_wall_clock)?;
    Ok(record)
}

fn report(record: &RunRecord) {
    println!(
        "{} {} seed {}: {} after {} iterations, cost {:.6}, rollouts {}",
        record.scenario.name(),
        observation_name(record.observation),
        record.seed,
        record.termination.name(),
        record.records.len() - 1,
        record.final_cost(),
        record.total_rollouts(),
    );
}

fn run(config: ExperimentConfig, args: &Common) -> Result<u8, Error> {
    let seed = args
        .seed
        .or_else(|| config.seeds.first().copied())
        .unwrap_or(0);
    let record = run_one(&config, seed, &config.output_dir, args.dump_datasets)?;
    report(&record);
    Ok(termination_code(record.termination))
}

/// Runs every seed into `root/seed_<s>` and writes `root/summary.csv`.
fn seeds_into(
    config: &ExperimentConfig,
    root: &Path,
    dump: bool,
) -> Result<(Vec<RunRecord>, u8), Error> {
    let results: Vec<(u64, Result<RunRecord, Error>)> = config
        .seeds
        .par_iter()
        .map(|&seed| {
            (
                seed,
                run_one(config, seed, &root.join(format!("seed_{seed}")), dump),
            )
        })
        .collect();
    let mut records = Vec::new();
    let mut codes = Vec::new();
    for (seed, result) in results {
        match result {
            Ok(record) => {
                report(&record);
                codes.push(termination_code(record.termination));
                records.push(record);
            }
            Err(e) => {
                eprintln!("seed {seed} failed: {e}");
                codes.push(error_code(&e));
            }
        }
    }
    let refs: Vec<&RunRecord> = records.iter().collect();
    let summary = summarize(&refs);
    write_summary(&root.join("summary.csv"), &refs, &summary)?;
    if let Some(last) = summary.rows.last() {
        println!(
            "{} {}: {} of {} seeds ok, final mean {:.6} std {:.6}, rollouts {}",
            config.scenario.name(),
            observation_name(config.observation),
            records.len(),
            config.seeds.len(),
            last.mean,
            last.std,
            summary.total_rollouts(),
        );
    }
    Ok((records, worst(codes)))
}

fn ensemble(config: ExperimentConfig, args: &Common) -> Result<u8, Error> {
    let (_, code) = seeds_into(&config, &config.output_dir, args.dump_datasets)?;
    Ok(code)
}

fn compare(config: ExperimentConfig, args: &Common) -> Result<u8, Error> {
    let mut all = Vec::new();
    let mut codes = Vec::new();
    for (observation, scenario) in comparison_arms() {
        let arm = config.with_scenario(scenario, Some(observation))?;
        let dir = config.output_dir.join(format!(
            "{}_{}",
            observation_name(observation),
            scenario.name()
        ));
        let (records, code) = seeds_into(&arm, &dir, args.dump_datasets)?;
        all.extend(records);
        codes.push(code);
    }
    let refs: Vec<&RunRecord> = all.iter().collect();
    write_compare(
        &config.output_dir.join("compare.csv"),
        &refs,
        config.record_wall_clock,
    )?;
    Ok(worst(codes))
}

fn check(seed: u64) -> u8 {
    match checks::run_all(seed) {
        Ok(reports) => {
            let mut ok = true;
            for r in &reports {
                let verdict = if r.passed() { "PASS" } else { "FAIL" };
                println!(
                    "{verdict} {}: max error {:.3e} (tolerance {:.1e})",
                    r.name, r.max_error, r.tolerance
                );
                ok &= r.passed();
            }
            if ok {
                EXIT_OK
            } else {
                EXIT_FAILURE
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_FAILURE
        }
    }
}
