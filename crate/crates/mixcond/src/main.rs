//! Command-line front end: thin dispatch over the library's experiment
//! harness, driven by a JSON configuration file.
//!
//! Exit codes: 0 success, 2 invalid configuration, 3 numerical failure,
//! 4 i/o failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use mixcond::error::Error;
use mixcond::harness::{
    emit_report, fit_rate, run_coherent_experiment, run_fixed_sector_experiment,
    run_hartree_trajectory, ExperimentResult, RateFit,
};
use mixcond::model::RunConfig;

#[derive(Parser)]
#[command(
    name = "mixcond",
    version,
    about = "Two-species condensate mean-field laboratory"
)]
struct Cli {
    /// Path to the JSON run configuration.
    #[arg(long, global = true, default_value = "config.json")]
    config: PathBuf,

    /// Output directory (overrides the configuration).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// RNG seed recorded in reports (overrides the configuration).
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads for parallel sweep points (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Suppress progress output.
    #[arg(long, global = true)]
    quiet: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate the coupled Hartree system and export the trajectory CSV.
    Hartree,
    /// Fixed-sector experiment: product states at every configured (N1, N2).
    Exact,
    /// Coherent-state experiment over the truncated two-species Fock space.
    Coherent,
    /// Full sweep: both experiments, rate fits, and reports.
    Converge,
    /// Validate the configuration and the particle-number sequence only.
    Validate,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                Error::Config(_) | Error::Dimension(_) => 2,
                Error::Numerical(_) | Error::SectorLimit(_) => 3,
                Error::Io { .. } => 4,
            })
        }
    }
}

fn run(cli: &Cli) -> mixcond::Result<()> {
    if let Some(threads) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| Error::Config(format!("thread pool setup failed: {e}")))?;
    }
    let mut config = RunConfig::from_path(&cli.config)?;
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(out) = &cli.out {
        config.output.directory = out.display().to_string();
    }
    let dest = PathBuf::from(&config.output.directory);
    let say = |msg: &str| {
        if !cli.quiet {
            eprintln!("{msg}");
        }
    };

    match cli.command {
        Command::Validate => {
            let report = config.validate()?;
            say(&format!(
                "configuration valid: {} pairs, max ratios (N1+N2)/N1 = {:.4}, (N1+N2)/N2 = {:.4}, \
                 N1/N2 = {:.4}, N2/N1 = {:.4}, sqrt(N1 N2)/(N1+N2) = {:.4}",
                config.particle_sequence.len(),
                report.max_total_over_n1,
                report.max_total_over_n2,
                report.max_n1_over_n2,
                report.max_n2_over_n1,
                report.max_geom_over_total,
            ));
        }
        Command::Hartree => {
            let trajectory = run_hartree_trajectory(&config)?;
            std::fs::create_dir_all(&dest).map_err(|e| Error::io(dest.display().to_string(), e))?;
            let csv = dest.join("hartree.csv");
            trajectory.write_csv(&csv)?;
            say(&format!(
                "hartree trajectory: {} samples -> {}",
                trajectory.samples.len(),
                csv.display()
            ));
            if config.output.write_fields {
                let data = dest.join("hartree_fields.bin");
                let header = dest.join("hartree_fields.header.txt");
                trajectory.write_fields(&data, &header)?;
                say(&format!("field snapshots -> {}", data.display()));
            }
        }
        Command::Exact => {
            let result = run_fixed_sector_experiment(&config)?;
            finish_experiment(&result, &config, "exact", &dest, &say)?;
        }
        Command::Coherent => {
            let result = run_coherent_experiment(&config)?;
            finish_experiment(&result, &config, "coherent", &dest, &say)?;
        }
        Command::Converge => {
            say("running fixed-sector sweep...");
            let exact = run_fixed_sector_experiment(&config)?;
            finish_experiment(&exact, &config, "exact", &dest, &say)?;
            say("running coherent sweep...");
            let coherent = run_coherent_experiment(&config)?;
            finish_experiment(&coherent, &config, "coherent", &dest, &say)?;
        }
    }
    Ok(())
}

fn finish_experiment(
    result: &ExperimentResult,
    config: &RunConfig,
    label: &str,
    dest: &std::path::Path,
    say: &dyn Fn(&str),
) -> mixcond::Result<()> {
    let fits: Vec<(f64, Option<RateFit>)> = result
        .sample_times()
        .into_iter()
        .map(|t| (t, fit_rate(&result.records, t)))
        .collect();
    let files = emit_report(result, &fits, config, label, dest)?;
    say(&format!(
        "{label}: {} records ({} skipped) -> {}",
        result.records.len(),
        result.skipped.len(),
        files.csv.display()
    ));
    for (t, fit) in &fits {
        match fit {
            Some(f) => say(&format!(
                "  t = {t:.3}: log-log slope {:.4} (residual {:.2e})",
                f.slope, f.residual
            )),
            None => say(&format!("  t = {t:.3}: no rate fit (degenerate data)")),
        }
    }
    Ok(())
}
