//! The headline experiment: sweep symmetric particle numbers, measure the
//! trace distance between the many-body reduced density and the Hartree
//! projector at fixed times, and fit the convergence rate.
//!
//! Run with `--full` for the N in {2, 4, 6, 8, 10} sweep (a few minutes);
//! the default stops at N = 6.

use mixcond::harness::{envelope_check, fit_rate, run_fixed_sector_experiment};
use mixcond::model::{
    CouplingConstants, FockCutoffsConfig, InitialStateConfig, LatticeConfig, OrbitalShape,
    OutputConfig, PotentialSpec, PotentialsConfig, PropagatorSettings, RunConfig, TimeGridConfig,
};

fn main() -> mixcond::Result<()> {
    let full = std::env::args().any(|a| a == "--full");
    let pairs: Vec<(usize, usize)> = if full {
        vec![(2, 2), (4, 4), (6, 6), (8, 8), (10, 10)]
    } else {
        vec![(2, 2), (4, 4), (6, 6)]
    };
    let max_n = pairs.iter().map(|p| p.0).max().unwrap();

    let config = RunConfig {
        lattice: LatticeConfig {
            dimension: 1,
            sites_per_axis: 4,
            spacing: 1.0,
        },
        potentials: PotentialsConfig {
            v1: PotentialSpec::gaussian(1.0, 1.0),
            v2: PotentialSpec::gaussian(1.0, 1.0),
            v12: PotentialSpec::gaussian(1.0, 1.0),
        },
        couplings: CouplingConstants::symmetric(),
        particle_sequence: pairs,
        sequence_tolerance: 1.0,
        time_grid: TimeGridConfig {
            t_final: 0.5,
            dt: 1e-3,
            sample_stride: 250,
        },
        fock_cutoffs: FockCutoffsConfig {
            species1: max_n,
            species2: max_n,
        },
        propagator: PropagatorSettings::default(),
        initial_state: InitialStateConfig {
            u: OrbitalShape::GaussianBump {
                center: 0,
                width: 1.0,
            },
            v: OrbitalShape::GaussianBump {
                center: 2,
                width: 1.5,
            },
        },
        output: OutputConfig::default(),
        seed: 0,
    };

    let started = std::time::Instant::now();
    let result = run_fixed_sector_experiment(&config)?;
    println!(
        "swept {} pairs in {:.1} s ({} records, {} skipped)",
        config.particle_sequence.len(),
        started.elapsed().as_secs_f64(),
        result.records.len(),
        result.skipped.len()
    );

    println!("\n  N     t      distance       p_sum");
    for r in &result.records {
        println!(
            "{:3}  {:.2}  {:.6e}  {:.6e}",
            r.n1, r.t, r.trace_distance, r.p_sum
        );
    }

    for t in result.sample_times() {
        if t == 0.0 {
            continue;
        }
        match fit_rate(&result.records, t) {
            Some(fit) => println!(
                "\nrate at t = {t:.2}: slope {:.4}, intercept {:.4}, residual {:.2e}",
                fit.slope, fit.intercept, fit.residual
            ),
            None => println!("\nrate at t = {t:.2}: no fit"),
        }
    }

    let envelope = envelope_check(&result.records, 2.0)?;
    println!(
        "\nenvelope: C = {:.4}, gamma = {:.4}, calibrated at N1+N2 = {}, violations: {}",
        envelope.c,
        envelope.gamma,
        envelope.base_n,
        envelope.violations.len()
    );
    Ok(())
}
