//! End-to-end experiments: Hartree trajectory plus many-body runs over the
//! configured `(N1, N2)` pairs, trace-distance measurements, rate fits, and
//! machine-readable reports.
//!
//! Sweep points run in parallel and are aggregated in sorted order, so output
//! files are byte-identical across re-runs with the same configuration.

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::dynamics::{
    assemble_sector_hamiltonian, fluctuation_moments, CoherentPropagator, SectorPropagator,
};
use crate::error::{Error, Result};
use crate::fock::state::coherent_state;
use crate::fock::{BasisRegistry, OneBodyVector, SectorState, TruncatedFockState};
use crate::hartree::{initial_orbital, HartreeSolver, HartreeState, HartreeTrajectory};
use crate::model::{LatticeModel, RunConfig};
use crate::reduced::{
    hartree_projector, part1_bound_terms, reduced_density_fock, reduced_density_sector,
    trace_distance,
};

/// One measured point of a convergence experiment.
#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceRecord {
    pub n1: usize,
    pub n2: usize,
    pub t: f64,
    pub trace_distance: f64,
    /// Sum of the nine bound terms at this sample.
    pub p_sum: f64,
    pub m10: f64,
    pub m01: f64,
    pub m11: f64,
    /// Hartree mass drifts `|h^d ||u||^2 - 1|`, `|h^d ||v||^2 - 1|` at this time.
    pub mass_drift1: f64,
    pub mass_drift2: f64,
    /// Hartree energy drift `|E(t) - E(0)|`.
    pub energy_drift: f64,
    /// Coherent-state mass beyond the Fock cutoffs (zero for fixed sectors).
    pub truncation_deficit: f64,
    /// Seconds elapsed within this sweep point when the record was produced.
    /// Reported in the summary, not in the CSV (which must be reproducible).
    pub wall_time: f64,
}

/// A sweep point that could not run, with the reason.
#[derive(Debug, Clone, Serialize)]
pub struct SkippedPair {
    pub n1: usize,
    pub n2: usize,
    pub reason: String,
}

/// A sweep point that ran but deserves attention (tight cutoffs, large
/// truncation deficit).
#[derive(Debug, Clone, Serialize)]
pub struct SweepWarning {
    pub n1: usize,
    pub n2: usize,
    pub message: String,
}

/// Records plus skipped pairs and warnings of one experiment.
#[derive(Debug, Clone, Default, Serialize)]
pub struct ExperimentResult {
    pub records: Vec<ConvergenceRecord>,
    pub skipped: Vec<SkippedPair>,
    pub warnings: Vec<SweepWarning>,
}

impl ExperimentResult {
    /// Distinct sample times, ascending.
    pub fn sample_times(&self) -> Vec<f64> {
        let mut times: Vec<f64> = Vec::new();
        for r in &self.records {
            if !times.iter().any(|t| (t - r.t).abs() < 1e-9) {
                times.push(r.t);
            }
        }
        times.sort_by(|a, b| a.partial_cmp(b).unwrap());
        times
    }
}

/// Shared per-run context: model, Hartree orbit, and basis cache.
struct RunContext {
    model: LatticeModel,
    trajectory: HartreeTrajectory,
    registry: Arc<BasisRegistry>,
    initial_u: OneBodyVector,
    initial_v: OneBodyVector,
}

fn prepare(config: &RunConfig) -> Result<RunContext> {
    config.validate()?;
    let model = config.build_model()?;
    let vol = model.volume_element();
    let u = initial_orbital(&config.initial_state.u, &model)?;
    let v = initial_orbital(&config.initial_state.v, &model)?;
    let state = HartreeState::normalized(u, v, vol)?;
    let solver = HartreeSolver::new(&model, config.couplings);
    let trajectory = solver.evolve(
        &state,
        config.time_grid.t_final,
        config.time_grid.dt,
        config.time_grid.sample_stride,
    )?;
    let registry = BasisRegistry::new(model.total_sites);
    let initial_u = OneBodyVector::new(state.u.clone(), vol);
    let initial_v = OneBodyVector::new(state.v.clone(), vol);
    Ok(RunContext {
        model,
        trajectory,
        registry,
        initial_u,
        initial_v,
    })
}

/// Build the record shared by both pipelines at one sample.
#[allow(clippy::too_many_arguments)]
fn make_record(
    n1: usize,
    n2: usize,
    sample_t: f64,
    distance: f64,
    p_sum: f64,
    moments: (f64, f64, f64),
    hartree_sample: &crate::hartree::TrajectorySample,
    energy_0: f64,
    deficit: f64,
    started: &Instant,
) -> ConvergenceRecord {
    ConvergenceRecord {
        n1,
        n2,
        t: sample_t,
        trace_distance: distance,
        p_sum,
        m10: moments.0,
        m01: moments.1,
        m11: moments.2,
        mass_drift1: (hartree_sample.mass1 - 1.0).abs(),
        mass_drift2: (hartree_sample.mass2 - 1.0).abs(),
        energy_drift: (hartree_sample.energy - energy_0).abs(),
        truncation_deficit: deficit,
        wall_time: started.elapsed().as_secs_f64(),
    }
}

fn sort_results(mut result: ExperimentResult) -> ExperimentResult {
    result.records.sort_by(|a, b| {
        (a.n1, a.n2)
            .cmp(&(b.n1, b.n2))
            .then(a.t.partial_cmp(&b.t).unwrap())
    });
    result.skipped.sort_by_key(|s| (s.n1, s.n2));
    result
        .warnings
        .sort_by(|a, b| (a.n1, a.n2, &a.message).cmp(&(b.n1, b.n2, &b.message)));
    result
}

/// Evolve the product states `u^(x N1) (x) v^(x N2)` for every configured pair
/// and measure the trace distance to the Hartree projector at each sample.
pub fn run_fixed_sector_experiment(config: &RunConfig) -> Result<ExperimentResult> {
    let ctx = prepare(config)?;
    let energy_0 = ctx.trajectory.samples[0].energy;
    let vol = ctx.model.volume_element();

    let outcomes: Vec<std::result::Result<Vec<ConvergenceRecord>, SkippedPair>> = config
        .particle_sequence
        .par_iter()
        .map(|&(n1, n2)| {
            let started = Instant::now();
            let skip = |reason: String| SkippedPair { n1, n2, reason };
            let hamiltonian = match assemble_sector_hamiltonian(
                &ctx.model,
                n1 as f64,
                n2 as f64,
                n1,
                n2,
                &ctx.registry,
                &config.propagator,
            ) {
                Ok(h) => h,
                Err(Error::SectorLimit(msg)) => return Err(skip(msg)),
                Err(e) => return Err(skip(format!("assembly failed: {e}"))),
            };
            let propagator = match SectorPropagator::new(hamiltonian, &config.propagator) {
                Ok(p) => p,
                Err(e) => return Err(skip(format!("propagator setup failed: {e}"))),
            };
            let run = || -> Result<Vec<ConvergenceRecord>> {
                let mut state = SectorState::product_state(
                    &ctx.initial_u,
                    &ctx.initial_v,
                    n1,
                    n2,
                    &ctx.registry,
                )?;
                let mut records = Vec::new();
                let mut t_prev = 0.0;
                for sample in &ctx.trajectory.samples {
                    let t = sample.state.t;
                    if t > t_prev {
                        state.coeffs = propagator.advance(&state.coeffs, t - t_prev)?;
                        state.t = t;
                        t_prev = t;
                    }
                    let gamma = reduced_density_sector(&state)?;
                    let u_t = OneBodyVector::new(sample.state.u.clone(), vol);
                    let v_t = OneBodyVector::new(sample.state.v.clone(), vol);
                    let projector = hartree_projector(&u_t, &v_t)?;
                    let distance = trace_distance(&gamma, &projector)?;
                    let as_fock = TruncatedFockState::from_sector(&state, ctx.registry.clone())?;
                    let moments = fluctuation_moments(&as_fock, &u_t, &v_t, n1 as f64, n2 as f64)?;
                    let bound = part1_bound_terms(&moments, n1 as f64, n2 as f64, distance)?;
                    records.push(make_record(
                        n1,
                        n2,
                        t,
                        distance,
                        bound.sum,
                        (moments.m10, moments.m01, moments.m11),
                        sample,
                        energy_0,
                        0.0,
                        &started,
                    ));
                }
                Ok(records)
            };
            run().map_err(|e| skip(format!("run failed: {e}")))
        })
        .collect();

    let mut result = ExperimentResult::default();
    for outcome in outcomes {
        match outcome {
            Ok(records) => result.records.extend(records),
            Err(skipped) => result.skipped.push(skipped),
        }
    }
    Ok(sort_results(result))
}

/// Default cutoff margin above the reference particle number.
pub fn default_cutoff_margin(n: usize) -> usize {
    (4.0 * (n as f64).sqrt()).ceil() as usize + 4
}

/// Evolve truncated coherent states with intensities `(N1, N2)` for every
/// configured pair; records carry the bound breakdown and truncation deficit.
pub fn run_coherent_experiment(config: &RunConfig) -> Result<ExperimentResult> {
    let ctx = prepare(config)?;
    let energy_0 = ctx.trajectory.samples[0].energy;
    let vol = ctx.model.volume_element();
    let (m1, m2) = (config.fock_cutoffs.species1, config.fock_cutoffs.species2);

    let outcomes: Vec<
        std::result::Result<(Vec<ConvergenceRecord>, Vec<SweepWarning>), SkippedPair>,
    > = config
        .particle_sequence
        .par_iter()
        .map(|&(n1, n2)| {
            let started = Instant::now();
            let skip = |reason: String| SkippedPair { n1, n2, reason };
            let mut warnings = Vec::new();
            if m1 < n1 + default_cutoff_margin(n1) || m2 < n2 + default_cutoff_margin(n2) {
                warnings.push(SweepWarning {
                    n1,
                    n2,
                    message: format!(
                        "cutoffs ({m1}, {m2}) below the recommended ({}, {})",
                        n1 + default_cutoff_margin(n1),
                        n2 + default_cutoff_margin(n2)
                    ),
                });
            }
            let run = |warnings: &mut Vec<SweepWarning>| -> Result<Vec<ConvergenceRecord>> {
                let f = ctx.initial_u.scale((n1 as f64).sqrt());
                let g = ctx.initial_v.scale((n2 as f64).sqrt());
                let state = coherent_state(
                    &f,
                    &g,
                    m1,
                    m2,
                    crate::fock::DEFAULT_DEFICIT_BOUND,
                    &ctx.registry,
                )?;
                let deficit = state.deficit();
                if state.deficit_flag {
                    warnings.push(SweepWarning {
                        n1,
                        n2,
                        message: format!(
                            "truncation deficit {deficit:.3e} above the configured bound"
                        ),
                    });
                }
                let propagator = CoherentPropagator::new(
                    &ctx.model,
                    n1 as f64,
                    n2 as f64,
                    &state,
                    &config.propagator,
                )?;
                let mut current = state;
                let mut records = Vec::new();
                let mut t_prev = 0.0;
                for sample in &ctx.trajectory.samples {
                    let t = sample.state.t;
                    if t > t_prev {
                        current = propagator.advance(&current, t - t_prev)?;
                        t_prev = t;
                    }
                    let gamma = reduced_density_fock(&current)?;
                    let u_t = OneBodyVector::new(sample.state.u.clone(), vol);
                    let v_t = OneBodyVector::new(sample.state.v.clone(), vol);
                    let projector = hartree_projector(&u_t, &v_t)?;
                    let distance = trace_distance(&gamma, &projector)?;
                    let moments = fluctuation_moments(&current, &u_t, &v_t, n1 as f64, n2 as f64)?;
                    let bound = part1_bound_terms(&moments, n1 as f64, n2 as f64, distance)?;
                    records.push(make_record(
                        n1,
                        n2,
                        t,
                        distance,
                        bound.sum,
                        (moments.m10, moments.m01, moments.m11),
                        sample,
                        energy_0,
                        deficit,
                        &started,
                    ));
                }
                Ok(records)
            };
            match run(&mut warnings) {
                Ok(records) => Ok((records, warnings)),
                Err(e) => Err(skip(format!("run failed: {e}"))),
            }
        })
        .collect();

    let mut result = ExperimentResult::default();
    for outcome in outcomes {
        match outcome {
            Ok((records, warnings)) => {
                result.records.extend(records);
                result.warnings.extend(warnings);
            }
            Err(skipped) => result.skipped.push(skipped),
        }
    }
    Ok(sort_results(result))
}

/// Engineering slack for truncated coherent-state bound checks:
/// `10 * deficit * (M1 + 1) (M2 + 1)`.
pub fn truncation_slack(deficit: f64, cutoff1: usize, cutoff2: usize) -> f64 {
    10.0 * deficit * ((cutoff1 + 1) * (cutoff2 + 1)) as f64
}

/// Least-squares fit of `log(distance)` against `log(N)` over symmetric pairs.
#[derive(Debug, Clone, Serialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square residual of the fit in log space.
    pub residual: f64,
    /// The `(N, distance)` points used.
    pub points: Vec<(usize, f64)>,
}

/// Fit the convergence rate at fixed time `t` over records with `N1 = N2 = N`.
/// Returns `None` when fewer than two distinct `N` contribute or any distance
/// is nonpositive.
pub fn fit_rate(records: &[ConvergenceRecord], t: f64) -> Option<RateFit> {
    let mut points: Vec<(usize, f64)> = records
        .iter()
        .filter(|r| (r.t - t).abs() < 1e-9 && r.n1 == r.n2)
        .map(|r| (r.n1, r.trace_distance))
        .collect();
    points.sort_by_key(|p| p.0);
    points.dedup_by_key(|p| p.0);
    if points.len() < 2 || points.iter().any(|&(_, d)| d <= 0.0) {
        return None;
    }
    let xs: Vec<f64> = points.iter().map(|&(n, _)| (n as f64).ln()).collect();
    let ys: Vec<f64> = points.iter().map(|&(_, d)| d.ln()).collect();
    let n = xs.len() as f64;
    let mean_x = xs.iter().sum::<f64>() / n;
    let mean_y = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mean_x) * (x - mean_x)).sum();
    let sxy: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (x - mean_x) * (y - mean_y))
        .sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    let residual = (xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| {
            let e = y - (intercept + slope * x);
            e * e
        })
        .sum::<f64>()
        / n)
        .sqrt();
    Some(RateFit {
        slope,
        intercept,
        residual,
        points,
    })
}

/// Exponential-envelope rendering of the convergence bound: constants fit on
/// the smallest-N records, checked on all larger pairs with a slack factor.
#[derive(Debug, Clone, Serialize)]
pub struct EnvelopeReport {
    pub c: f64,
    pub gamma: f64,
    pub base_n: usize,
    /// Records (n1, n2, t, distance, allowed) violating the envelope.
    pub violations: Vec<(usize, usize, f64, f64, f64)>,
}

/// Calibrate `distance <= C e^{gamma t} (1/sqrt(N1) + 1/sqrt(N2))` on the
/// smallest swept `N1 + N2` and verify every other record against
/// `slack * C e^{gamma t} (...)`. Records with tiny distances are skipped in
/// calibration (their logarithms are dominated by roundoff).
pub fn envelope_check(records: &[ConvergenceRecord], slack: f64) -> Result<EnvelopeReport> {
    let rate = |n1: usize, n2: usize| 1.0 / (n1 as f64).sqrt() + 1.0 / (n2 as f64).sqrt();
    let base = records
        .iter()
        .map(|r| r.n1 + r.n2)
        .min()
        .ok_or_else(|| Error::Numerical("no records to calibrate against".into()))?;
    let base_points: Vec<(f64, f64)> = records
        .iter()
        .filter(|r| r.n1 + r.n2 == base && r.trace_distance > 1e-12)
        .map(|r| (r.t, (r.trace_distance / rate(r.n1, r.n2)).ln()))
        .collect();
    if base_points.len() < 2 {
        return Err(Error::Numerical(
            "need at least two informative samples at the smallest N to calibrate the envelope"
                .into(),
        ));
    }
    let n = base_points.len() as f64;
    let mean_t = base_points.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_y = base_points.iter().map(|p| p.1).sum::<f64>() / n;
    let stt: f64 = base_points
        .iter()
        .map(|p| (p.0 - mean_t) * (p.0 - mean_t))
        .sum();
    let sty: f64 = base_points
        .iter()
        .map(|p| (p.0 - mean_t) * (p.1 - mean_y))
        .sum();
    let gamma = if stt > 0.0 { (sty / stt).max(0.0) } else { 0.0 };
    let c = (mean_y - gamma * mean_t).exp();
    let mut violations = Vec::new();
    for r in records {
        if r.n1 + r.n2 == base || r.trace_distance <= 1e-12 {
            continue;
        }
        let allowed = slack * c * (gamma * r.t).exp() * rate(r.n1, r.n2);
        if r.trace_distance > allowed {
            violations.push((r.n1, r.n2, r.t, r.trace_distance, allowed));
        }
    }
    Ok(EnvelopeReport {
        c,
        gamma,
        base_n: base,
        violations,
    })
}

/// Paths written by [`emit_report`].
#[derive(Debug, Clone)]
pub struct ReportFiles {
    pub csv: PathBuf,
    pub summary: PathBuf,
}

#[derive(Serialize)]
struct Summary<'a> {
    label: &'a str,
    version: &'a str,
    seed: u64,
    record_count: usize,
    skipped: &'a [SkippedPair],
    warnings: &'a [SweepWarning],
    fits: Vec<FitEntry>,
    total_wall_time_seconds: f64,
    config: &'a RunConfig,
}

#[derive(Serialize)]
struct FitEntry {
    t: f64,
    fit: Option<RateFit>,
}

/// The stable CSV column order.
pub const CSV_COLUMNS: &str =
    "n1,n2,t,trace_distance,p_sum,m10,m01,m11,mass_drift1,mass_drift2,energy_drift,truncation_deficit";

/// Render records as CSV text (deterministic for identical inputs).
pub fn records_to_csv(records: &[ConvergenceRecord]) -> String {
    let mut out = String::from(CSV_COLUMNS);
    out.push('\n');
    for r in records {
        out.push_str(&format!(
            "{},{},{:.12e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}\n",
            r.n1,
            r.n2,
            r.t,
            r.trace_distance,
            r.p_sum,
            r.m10,
            r.m01,
            r.m11,
            r.mass_drift1,
            r.mass_drift2,
            r.energy_drift,
            r.truncation_deficit
        ));
    }
    out
}

/// Write `<label>.csv` and `<label>_summary.json` into `destination`.
pub fn emit_report(
    result: &ExperimentResult,
    fits: &[(f64, Option<RateFit>)],
    config: &RunConfig,
    label: &str,
    destination: &Path,
) -> Result<ReportFiles> {
    std::fs::create_dir_all(destination)
        .map_err(|e| Error::io(destination.display().to_string(), e))?;
    let csv_path = destination.join(format!("{label}.csv"));
    std::fs::write(&csv_path, records_to_csv(&result.records))
        .map_err(|e| Error::io(csv_path.display().to_string(), e))?;

    let total_wall: f64 = {
        // wall_time is cumulative within each sweep point; take each pair's max.
        let mut per_pair: std::collections::BTreeMap<(usize, usize), f64> = Default::default();
        for r in &result.records {
            let entry = per_pair.entry((r.n1, r.n2)).or_insert(0.0);
            *entry = entry.max(r.wall_time);
        }
        per_pair.values().sum()
    };
    let summary = Summary {
        label,
        version: env!("CARGO_PKG_VERSION"),
        seed: config.seed,
        record_count: result.records.len(),
        skipped: &result.skipped,
        warnings: &result.warnings,
        fits: fits
            .iter()
            .map(|(t, fit)| FitEntry {
                t: *t,
                fit: fit.clone(),
            })
            .collect(),
        total_wall_time_seconds: total_wall,
        config,
    };
    let summary_path = destination.join(format!("{label}_summary.json"));
    let text = serde_json::to_string_pretty(&summary)
        .map_err(|e| Error::Numerical(format!("summary serialization failed: {e}")))?;
    std::fs::write(&summary_path, text)
        .map_err(|e| Error::io(summary_path.display().to_string(), e))?;
    Ok(ReportFiles {
        csv: csv_path,
        summary: summary_path,
    })
}

/// Run the Hartree trajectory described by the configuration (the PDE half of
/// the laboratory, without any many-body runs).
pub fn run_hartree_trajectory(config: &RunConfig) -> Result<HartreeTrajectory> {
    let ctx = prepare(config)?;
    Ok(ctx.trajectory)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{
        CouplingConstants, FockCutoffsConfig, InitialStateConfig, LatticeConfig, OrbitalShape,
        OutputConfig, PotentialSpec, PotentialsConfig, PropagatorSettings, TimeGridConfig,
    };

    fn tiny_config(g: f64, pairs: Vec<(usize, usize)>) -> RunConfig {
        RunConfig {
            lattice: LatticeConfig {
                dimension: 1,
                sites_per_axis: 2,
                spacing: 1.0,
            },
            potentials: PotentialsConfig {
                v1: PotentialSpec::gaussian(g, 1.0),
                v2: PotentialSpec::gaussian(g, 1.0),
                v12: PotentialSpec::gaussian(g, 1.0),
            },
            couplings: CouplingConstants::symmetric(),
            particle_sequence: pairs,
            sequence_tolerance: 1.0,
            time_grid: TimeGridConfig {
                t_final: 0.2,
                dt: 1e-3,
                sample_stride: 100,
            },
            fock_cutoffs: FockCutoffsConfig {
                species1: 10,
                species2: 10,
            },
            propagator: PropagatorSettings::default(),
            initial_state: InitialStateConfig {
                u: OrbitalShape::GaussianBump {
                    center: 0,
                    width: 1.0,
                },
                v: OrbitalShape::Uniform,
            },
            output: OutputConfig::default(),
            seed: 11,
        }
    }

    #[test]
    fn fixed_sector_zero_potential_distances_vanish() {
        let config = tiny_config(0.0, vec![(2, 2), (3, 2)]);
        let result = run_fixed_sector_experiment(&config).unwrap();
        assert!(result.skipped.is_empty());
        assert_eq!(result.records.len(), 2 * 3);
        for r in &result.records {
            assert!(
                r.trace_distance <= 1e-9,
                "free distance {} at t = {}",
                r.trace_distance,
                r.t
            );
        }
    }

    #[test]
    fn fixed_sector_time_zero_distance_is_machine_small() {
        let config = tiny_config(1.0, vec![(2, 1)]);
        let result = run_fixed_sector_experiment(&config).unwrap();
        let first = &result.records[0];
        assert_eq!(first.t, 0.0);
        assert!(
            first.trace_distance <= 1e-12,
            "t=0 distance {}",
            first.trace_distance
        );
    }

    #[test]
    fn coherent_cutoff_margin_warning() {
        // Cutoffs barely above N trigger the margin warning without aborting.
        let mut config = tiny_config(1.0, vec![(8, 8)]);
        config.fock_cutoffs = FockCutoffsConfig {
            species1: 9,
            species2: 9,
        };
        let result = run_coherent_experiment(&config).unwrap();
        assert!(result.skipped.is_empty());
        assert!(!result.records.is_empty());
        assert!(
            result
                .warnings
                .iter()
                .any(|w| w.message.contains("recommended")),
            "expected a cutoff-margin warning, got {:?}",
            result.warnings
        );
    }

    #[test]
    fn coherent_pipeline_bound_chain_holds() {
        let config = tiny_config(1.0, vec![(1, 1), (2, 2)]);
        let result = run_coherent_experiment(&config).unwrap();
        assert!(result.skipped.is_empty());
        for r in &result.records {
            let slack = truncation_slack(
                r.truncation_deficit,
                config.fock_cutoffs.species1,
                config.fock_cutoffs.species2,
            );
            assert!(
                r.trace_distance <= r.p_sum + slack + 1e-12,
                "bound chain violated: d = {}, p_sum = {}, slack = {slack}",
                r.trace_distance,
                r.p_sum
            );
            assert!(r.m10 >= -1e-10 && r.m01 >= -1e-10 && r.m11 >= -1e-10);
        }
    }

    #[test]
    fn oversized_sector_is_skipped_with_reason() {
        let mut config = tiny_config(1.0, vec![(2, 2), (8, 8)]);
        config.propagator.sector_dimension_limit = 50;
        config.fock_cutoffs = FockCutoffsConfig {
            species1: 8,
            species2: 8,
        };
        let result = run_fixed_sector_experiment(&config).unwrap();
        assert_eq!(result.skipped.len(), 1);
        assert_eq!((result.skipped[0].n1, result.skipped[0].n2), (8, 8));
        assert!(result.records.iter().all(|r| (r.n1, r.n2) == (2, 2)));
    }

    #[test]
    fn rate_fit_closed_forms() {
        let rec = |n: usize, d: f64| ConvergenceRecord {
            n1: n,
            n2: n,
            t: 0.5,
            trace_distance: d,
            p_sum: 0.0,
            m10: 0.0,
            m01: 0.0,
            m11: 0.0,
            mass_drift1: 0.0,
            mass_drift2: 0.0,
            energy_drift: 0.0,
            truncation_deficit: 0.0,
            wall_time: 0.0,
        };
        let records = vec![rec(2, 0.70), rec(8, 0.35)];
        let fit = fit_rate(&records, 0.5).unwrap();
        let expected = 0.5f64.ln() / 4.0f64.ln();
        assert!((fit.slope - expected).abs() < 1e-12, "slope {}", fit.slope);

        let flat = vec![rec(2, 0.4), rec(4, 0.4), rec(8, 0.4)];
        let fit = fit_rate(&flat, 0.5).unwrap();
        assert!(fit.slope.abs() < 1e-12);
        assert!(fit.residual < 1e-12);

        // Degenerate inputs: single N, zero distances.
        assert!(fit_rate(&[rec(2, 0.7)], 0.5).is_none());
        assert!(fit_rate(&[rec(2, 0.0), rec(4, 0.0)], 0.5).is_none());
        assert!(fit_rate(&records, 0.25).is_none());
    }

    #[test]
    fn envelope_check_calibrates_and_accepts_decaying_data() {
        let rec = |n: usize, t: f64, d: f64| ConvergenceRecord {
            n1: n,
            n2: n,
            t,
            trace_distance: d,
            p_sum: 0.0,
            m10: 0.0,
            m01: 0.0,
            m11: 0.0,
            mass_drift1: 0.0,
            mass_drift2: 0.0,
            energy_drift: 0.0,
            truncation_deficit: 0.0,
            wall_time: 0.0,
        };
        // Synthetic data obeying d = 0.3 e^{0.8 t} (2 / sqrt(N)) exactly.
        let synth = |n: usize, t: f64| 0.3 * (0.8 * t).exp() * 2.0 / (n as f64).sqrt();
        let mut records = Vec::new();
        for n in [2usize, 4, 8] {
            for t in [0.25, 0.5] {
                records.push(rec(n, t, synth(n, t)));
            }
        }
        let report = envelope_check(&records, 2.0).unwrap();
        assert!(
            report.violations.is_empty(),
            "violations: {:?}",
            report.violations
        );
        assert!((report.gamma - 0.8).abs() < 1e-9);
        assert!((report.c - 0.3).abs() < 1e-9);

        // A record far above the envelope is caught.
        records.push(rec(16, 0.5, 1.5));
        let report = envelope_check(&records, 2.0).unwrap();
        assert_eq!(report.violations.len(), 1);
    }

    #[test]
    fn csv_is_deterministic_and_has_the_documented_columns() {
        let config = tiny_config(1.0, vec![(2, 2)]);
        let a = run_fixed_sector_experiment(&config).unwrap();
        let b = run_fixed_sector_experiment(&config).unwrap();
        let csv_a = records_to_csv(&a.records);
        let csv_b = records_to_csv(&b.records);
        assert_eq!(csv_a, csv_b);
        let header = csv_a.lines().next().unwrap();
        assert_eq!(header.split(',').count(), 12);
        assert_eq!(header, CSV_COLUMNS);
        // One data row per (pair, sample), all columns populated.
        let row = csv_a.lines().nth(1).unwrap();
        assert_eq!(row.split(',').count(), 12);
        assert!(!row.split(',').any(|c| c.is_empty()));

        // Empty record list: header-only CSV.
        assert_eq!(records_to_csv(&[]), format!("{CSV_COLUMNS}\n"));
    }

    #[test]
    fn report_files_roundtrip() {
        let config = tiny_config(1.0, vec![(2, 2)]);
        let result = run_fixed_sector_experiment(&config).unwrap();
        let fits: Vec<(f64, Option<RateFit>)> = result
            .sample_times()
            .into_iter()
            .map(|t| (t, fit_rate(&result.records, t)))
            .collect();
        let dir = std::env::temp_dir().join(format!("mixcond_report_{}", std::process::id()));
        let files = emit_report(&result, &fits, &config, "exact", &dir).unwrap();
        let csv = std::fs::read_to_string(&files.csv).unwrap();
        assert!(csv.starts_with(CSV_COLUMNS));
        let summary: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(&files.summary).unwrap()).unwrap();
        assert_eq!(summary["label"], "exact");
        assert_eq!(summary["record_count"], result.records.len());
        assert_eq!(summary["seed"], 11);
        std::fs::remove_dir_all(&dir).ok();
    }
}
