//! Discretized one-body space, interaction potentials, coupling constants, and
//! validated run configuration.
//!
//! Everything downstream (the Hartree integrator, the Fock-space machinery, the
//! experiment harness) works on a [`LatticeModel`]: a periodic lattice with a
//! nearest-neighbor Laplacian and pair potentials sampled at minimal-image
//! distances. All construction here is pure; the resulting values are immutable
//! and safe to share across threads.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Shape of a pair interaction, sampled pointwise on the lattice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PotentialKind {
    /// No interaction.
    Zero,
    /// `g exp(-(r/sigma)^2)`.
    Gaussian,
    /// `g / sqrt(r^2 + a^2)`.
    SoftCoulomb,
    /// `g exp(-r/sigma) / r`, with the on-site value replaced by the value at `r = h/2`.
    Yukawa,
    /// `g / h^d` on site, zero elsewhere.
    Contact,
}

/// A pair potential: kind, signed strength, and a length parameter where the
/// kind requires one (`sigma` for gaussian/yukawa, softening `a` for soft-coulomb).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PotentialSpec {
    pub kind: PotentialKind,
    #[serde(default)]
    pub strength: f64,
    /// Range `sigma` or softening `a`, depending on `kind`. Ignored by `zero` and `contact`.
    #[serde(default = "default_range")]
    pub range: f64,
}

fn default_range() -> f64 {
    1.0
}

impl PotentialSpec {
    pub fn zero() -> Self {
        PotentialSpec {
            kind: PotentialKind::Zero,
            strength: 0.0,
            range: 1.0,
        }
    }

    pub fn gaussian(strength: f64, sigma: f64) -> Self {
        PotentialSpec {
            kind: PotentialKind::Gaussian,
            strength,
            range: sigma,
        }
    }

    /// Check kind-specific parameter constraints.
    pub fn validate(&self) -> Result<()> {
        match self.kind {
            PotentialKind::Zero | PotentialKind::Contact => Ok(()),
            PotentialKind::Gaussian | PotentialKind::Yukawa | PotentialKind::SoftCoulomb => {
                if self.range > 0.0 && self.range.is_finite() {
                    Ok(())
                } else {
                    Err(Error::Config(format!(
                        "potential kind {:?} requires a positive range, got {}",
                        self.kind, self.range
                    )))
                }
            }
        }
    }

    /// Evaluate the potential at distance `r >= 0` for a lattice with spacing `h`
    /// in `d` dimensions.
    fn evaluate(&self, r: f64, h: f64, d: usize) -> f64 {
        let g = self.strength;
        match self.kind {
            PotentialKind::Zero => 0.0,
            PotentialKind::Gaussian => g * (-(r / self.range).powi(2)).exp(),
            PotentialKind::SoftCoulomb => g / (r * r + self.range * self.range).sqrt(),
            PotentialKind::Yukawa => {
                // On-site singularity regularized to the value at r = h/2.
                let r_eff = r.max(0.5 * h);
                g * (-r_eff / self.range).exp() / r_eff
            }
            PotentialKind::Contact => {
                if r == 0.0 {
                    g / h.powi(d as i32)
                } else {
                    0.0
                }
            }
        }
    }
}

/// The asymptotic population fractions `c1`, `c2` of the two species.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CouplingConstants {
    pub c1: f64,
    pub c2: f64,
}

impl CouplingConstants {
    pub fn new(c1: f64, c2: f64) -> Result<Self> {
        let c = CouplingConstants { c1, c2 };
        c.validate()?;
        Ok(c)
    }

    pub fn symmetric() -> Self {
        CouplingConstants { c1: 0.5, c2: 0.5 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c1 >= 0.0 && self.c2 >= 0.0) {
            return Err(Error::Config(format!(
                "couplings must be nonnegative, got c1={} c2={}",
                self.c1, self.c2
            )));
        }
        if (self.c1 + self.c2 - 1.0).abs() > 1e-12 {
            return Err(Error::Config(format!(
                "couplings must sum to one, got c1+c2={}",
                self.c1 + self.c2
            )));
        }
        Ok(())
    }
}

/// The discretized one-body space: periodic lattice, Laplacian, and the three
/// sampled pair potentials.
#[derive(Debug, Clone)]
pub struct LatticeModel {
    pub dimension: usize,
    pub sites_per_axis: usize,
    pub spacing: f64,
    /// Always true in this version; kept explicit for the record.
    pub periodic: bool,
    pub total_sites: usize,
    /// `-Delta` as a real symmetric positive semidefinite matrix (units 1/length^2).
    pub laplacian: DMatrix<f64>,
    /// Intra-species potential of species 1, `V1(i,j) = V1(x_i - x_j)`.
    pub v1: DMatrix<f64>,
    /// Intra-species potential of species 2.
    pub v2: DMatrix<f64>,
    /// Inter-species potential.
    pub v12: DMatrix<f64>,
}

impl LatticeModel {
    /// Build a model from lattice geometry and the three potential specs.
    ///
    /// `sites_per_axis = 1` is allowed and yields a single mode with zero
    /// kinetic term (the periodic stencil cancels exactly); the standalone
    /// [`build_laplacian`] keeps its `L >= 2` guard for direct callers.
    pub fn new(
        dimension: usize,
        sites_per_axis: usize,
        spacing: f64,
        v1: &PotentialSpec,
        v2: &PotentialSpec,
        v12: &PotentialSpec,
    ) -> Result<Self> {
        check_geometry(dimension, sites_per_axis, spacing)?;
        for spec in [v1, v2, v12] {
            spec.validate()?;
        }
        let laplacian = laplacian_unchecked(dimension, sites_per_axis, spacing);
        let model = LatticeModel {
            dimension,
            sites_per_axis,
            spacing,
            periodic: true,
            total_sites: sites_per_axis.pow(dimension as u32),
            laplacian,
            v1: sample_potential(v1, dimension, sites_per_axis, spacing)?,
            v2: sample_potential(v2, dimension, sites_per_axis, spacing)?,
            v12: sample_potential(v12, dimension, sites_per_axis, spacing)?,
        };
        Ok(model)
    }

    /// Single periodic site: one mode, zero kinetic term.
    pub fn single_mode(
        spacing: f64,
        v1: &PotentialSpec,
        v2: &PotentialSpec,
        v12: &PotentialSpec,
    ) -> Result<Self> {
        LatticeModel::new(1, 1, spacing, v1, v2, v12)
    }

    /// Volume element `h^d` of one lattice cell.
    pub fn volume_element(&self) -> f64 {
        self.spacing.powi(self.dimension as i32)
    }

    /// Stable fingerprint of the model contents, used to tag derived operators.
    pub fn fingerprint(&self) -> u64 {
        let mut hasher = DefaultHasher::new();
        self.dimension.hash(&mut hasher);
        self.sites_per_axis.hash(&mut hasher);
        self.spacing.to_bits().hash(&mut hasher);
        for m in [&self.laplacian, &self.v1, &self.v2, &self.v12] {
            for x in m.iter() {
                x.to_bits().hash(&mut hasher);
            }
        }
        hasher.finish()
    }
}

fn check_geometry(dimension: usize, sites_per_axis: usize, spacing: f64) -> Result<()> {
    if !(1..=3).contains(&dimension) {
        return Err(Error::Config(format!(
            "lattice dimension must be 1, 2 or 3, got {dimension}"
        )));
    }
    if sites_per_axis == 0 {
        return Err(Error::Config("sites_per_axis must be positive".into()));
    }
    if !(spacing > 0.0 && spacing.is_finite()) {
        return Err(Error::Config(format!(
            "spacing must be positive, got {spacing}"
        )));
    }
    Ok(())
}

/// Decompose a flat site index into per-axis coordinates (row-major).
fn site_coords(mut index: usize, dimension: usize, l: usize) -> [usize; 3] {
    let mut coords = [0usize; 3];
    for axis in (0..dimension).rev() {
        coords[axis] = index % l;
        index /= l;
    }
    coords
}

fn flat_index(coords: &[usize; 3], dimension: usize, l: usize) -> usize {
    let mut idx = 0;
    for axis in 0..dimension {
        idx = idx * l + coords[axis];
    }
    idx
}

fn laplacian_unchecked(dimension: usize, l: usize, h: f64) -> DMatrix<f64> {
    let m = l.pow(dimension as u32);
    let inv_h2 = 1.0 / (h * h);
    let mut lap = DMatrix::<f64>::zeros(m, m);
    for s in 0..m {
        let coords = site_coords(s, dimension, l);
        for axis in 0..dimension {
            lap[(s, s)] += 2.0 * inv_h2;
            for step in [l - 1, 1] {
                let mut n = coords;
                n[axis] = (coords[axis] + step) % l;
                let t = flat_index(&n, dimension, l);
                lap[(s, t)] -= inv_h2;
            }
        }
    }
    lap
}

/// Nearest-neighbor periodic `-Delta` on `L^d` sites with spacing `h`.
///
/// In 1D, `(-Delta psi)_j = (2 psi_j - psi_{j-1} - psi_{j+1}) / h^2` with indices
/// mod `L`; higher dimensions are the Kronecker sum of 1D stencils.
pub fn build_laplacian(
    dimension: usize,
    sites_per_axis: usize,
    spacing: f64,
) -> Result<DMatrix<f64>> {
    check_geometry(dimension, sites_per_axis, spacing)?;
    if sites_per_axis < 2 {
        return Err(Error::Config(format!(
            "laplacian stencil needs at least 2 sites per axis, got {sites_per_axis}"
        )));
    }
    Ok(laplacian_unchecked(dimension, sites_per_axis, spacing))
}

/// Sample a pair potential as a symmetric `M x M` matrix with entries
/// `V(i,j) = V(r_ij)`, `r_ij` the minimal-image periodic distance.
pub fn sample_potential(
    spec: &PotentialSpec,
    dimension: usize,
    sites_per_axis: usize,
    spacing: f64,
) -> Result<DMatrix<f64>> {
    check_geometry(dimension, sites_per_axis, spacing)?;
    spec.validate()?;
    let l = sites_per_axis;
    let m = l.pow(dimension as u32);
    let mut v = DMatrix::<f64>::zeros(m, m);
    for i in 0..m {
        let ci = site_coords(i, dimension, l);
        for j in 0..m {
            let cj = site_coords(j, dimension, l);
            let mut r2 = 0.0;
            for axis in 0..dimension {
                let delta = ci[axis].abs_diff(cj[axis]);
                let wrapped = delta.min(l - delta);
                let dist = wrapped as f64 * spacing;
                r2 += dist * dist;
            }
            v[(i, j)] = spec.evaluate(r2.sqrt(), spacing, dimension);
        }
    }
    for x in v.iter() {
        if !x.is_finite() {
            return Err(Error::Numerical(format!(
                "sampled potential {:?} produced a non-finite entry",
                spec.kind
            )));
        }
    }
    Ok(v)
}

/// Outcome of checking a particle-number sequence against its limit fractions.
#[derive(Debug, Clone, Serialize)]
pub struct SequenceReport {
    /// Per-pair deviations `|N1/(N1+N2) - c1|` and `|N2/(N1+N2) - c2|`.
    pub deviations: Vec<(f64, f64)>,
    /// Max over pairs of `(N1+N2)/N1`.
    pub max_total_over_n1: f64,
    /// Max over pairs of `(N1+N2)/N2`.
    pub max_total_over_n2: f64,
    /// Max over pairs of `N1/N2`.
    pub max_n1_over_n2: f64,
    /// Max over pairs of `N2/N1`.
    pub max_n2_over_n1: f64,
    /// Max over pairs of `sqrt(N1 N2)/(N1+N2)`.
    pub max_geom_over_total: f64,
}

/// Check that every pair `(N1, N2)` satisfies
/// `|N1/(N1+N2) - c1| <= D/N2` and `|N2/(N1+N2) - c2| <= D/N1`,
/// and report the five ratio bounds used by the harness.
pub fn validate_sequences(
    pairs: &[(usize, usize)],
    couplings: &CouplingConstants,
    tolerance_d: f64,
) -> Result<SequenceReport> {
    couplings.validate()?;
    if pairs.is_empty() {
        return Err(Error::Config(
            "particle sequence must contain at least one pair".into(),
        ));
    }
    if !(tolerance_d > 0.0) {
        return Err(Error::Config(format!(
            "sequence tolerance D must be positive, got {tolerance_d}"
        )));
    }
    let mut report = SequenceReport {
        deviations: Vec::with_capacity(pairs.len()),
        max_total_over_n1: 0.0,
        max_total_over_n2: 0.0,
        max_n1_over_n2: 0.0,
        max_n2_over_n1: 0.0,
        max_geom_over_total: 0.0,
    };
    for &(n1, n2) in pairs {
        if n1 == 0 || n2 == 0 {
            return Err(Error::Config(format!(
                "particle numbers must be at least 1, got ({n1}, {n2})"
            )));
        }
        let (f1, f2) = (n1 as f64, n2 as f64);
        let total = f1 + f2;
        let dev1 = (f1 / total - couplings.c1).abs();
        let dev2 = (f2 / total - couplings.c2).abs();
        if dev1 > tolerance_d / f2 || dev2 > tolerance_d / f1 {
            return Err(Error::Config(format!(
                "pair ({n1}, {n2}) violates the sequence condition: \
                 |N1/(N1+N2) - c1| = {dev1:.6e} (bound {:.6e}), \
                 |N2/(N1+N2) - c2| = {dev2:.6e} (bound {:.6e})",
                tolerance_d / f2,
                tolerance_d / f1
            )));
        }
        report.deviations.push((dev1, dev2));
        report.max_total_over_n1 = report.max_total_over_n1.max(total / f1);
        report.max_total_over_n2 = report.max_total_over_n2.max(total / f2);
        report.max_n1_over_n2 = report.max_n1_over_n2.max(f1 / f2);
        report.max_n2_over_n1 = report.max_n2_over_n1.max(f2 / f1);
        report.max_geom_over_total = report.max_geom_over_total.max((f1 * f2).sqrt() / total);
    }
    Ok(report)
}

/* Run configuration ********************************************************/

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LatticeConfig {
    pub dimension: usize,
    pub sites_per_axis: usize,
    #[serde(default = "default_spacing")]
    pub spacing: f64,
}

fn default_spacing() -> f64 {
    1.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PotentialsConfig {
    pub v1: PotentialSpec,
    pub v2: PotentialSpec,
    pub v12: PotentialSpec,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TimeGridConfig {
    pub t_final: f64,
    pub dt: f64,
    /// Steps between recorded samples.
    pub sample_stride: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FockCutoffsConfig {
    pub species1: usize,
    pub species2: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PropagationMethod {
    /// Pick dense below the dimension threshold, Krylov above.
    Auto,
    DenseEig,
    Krylov,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PropagatorSettings {
    #[serde(default = "default_method")]
    pub method: PropagationMethod,
    #[serde(default = "default_krylov_dim")]
    pub krylov_dim: usize,
    /// Time substep for Krylov propagation.
    #[serde(default = "default_substep")]
    pub substep: f64,
    /// Dimension at or below which the dense eigendecomposition path is used.
    #[serde(default = "default_dense_threshold")]
    pub dense_threshold: usize,
    /// Hard cap on sector dimensions; larger sectors are rejected.
    #[serde(default = "default_sector_limit")]
    pub sector_dimension_limit: usize,
}

fn default_method() -> PropagationMethod {
    PropagationMethod::Auto
}
fn default_krylov_dim() -> usize {
    30
}
fn default_substep() -> f64 {
    0.05
}
fn default_dense_threshold() -> usize {
    2000
}
fn default_sector_limit() -> usize {
    1 << 21
}

impl Default for PropagatorSettings {
    fn default() -> Self {
        PropagatorSettings {
            method: default_method(),
            krylov_dim: default_krylov_dim(),
            substep: default_substep(),
            dense_threshold: default_dense_threshold(),
            sector_dimension_limit: default_sector_limit(),
        }
    }
}

/// Shape of the initial one-body orbitals; normalized after sampling.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OrbitalShape {
    /// Constant over the lattice.
    Uniform,
    /// `exp(-(x - center)^2 / (2 width^2))` per axis, with periodic minimal-image distance to the center site.
    GaussianBump { center: usize, width: f64 },
    /// Plane wave with integer mode index per axis.
    PlaneWave { mode: usize },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InitialStateConfig {
    pub u: OrbitalShape,
    pub v: OrbitalShape,
}

impl Default for InitialStateConfig {
    fn default() -> Self {
        InitialStateConfig {
            u: OrbitalShape::GaussianBump {
                center: 0,
                width: 1.0,
            },
            v: OrbitalShape::Uniform,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OutputConfig {
    pub directory: String,
    /// Also dump Hartree field snapshots as flat binary records.
    #[serde(default)]
    pub write_fields: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            directory: "out".into(),
            write_fields: false,
        }
    }
}

/// Complete, validated description of a run. Read from a single JSON file with
/// stable key names (see the repository README for the schema).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub lattice: LatticeConfig,
    pub potentials: PotentialsConfig,
    pub couplings: CouplingConstants,
    /// Particle-number pairs `(N1, N2)` swept by the experiments.
    pub particle_sequence: Vec<(usize, usize)>,
    /// Constant `D` in the sequence condition.
    #[serde(default = "default_sequence_tolerance")]
    pub sequence_tolerance: f64,
    pub time_grid: TimeGridConfig,
    pub fock_cutoffs: FockCutoffsConfig,
    #[serde(default)]
    pub propagator: PropagatorSettings,
    #[serde(default)]
    pub initial_state: InitialStateConfig,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub seed: u64,
}

fn default_sequence_tolerance() -> f64 {
    1.0
}

impl RunConfig {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        let config: RunConfig = serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("failed to parse {}: {e}", path.display())))?;
        config.validate()?;
        Ok(config)
    }

    /// Validate all invariants and return the sequence report.
    pub fn validate(&self) -> Result<SequenceReport> {
        check_geometry(
            self.lattice.dimension,
            self.lattice.sites_per_axis,
            self.lattice.spacing,
        )?;
        for spec in [
            &self.potentials.v1,
            &self.potentials.v2,
            &self.potentials.v12,
        ] {
            spec.validate()?;
        }
        self.couplings.validate()?;
        if !(self.time_grid.dt > 0.0) {
            return Err(Error::Config(format!(
                "dt must be positive, got {}",
                self.time_grid.dt
            )));
        }
        if self.time_grid.t_final < 0.0 {
            return Err(Error::Config(format!(
                "t_final must be nonnegative, got {}",
                self.time_grid.t_final
            )));
        }
        if self.time_grid.sample_stride == 0 {
            return Err(Error::Config("sample_stride must be positive".into()));
        }
        if self.propagator.krylov_dim < 4 {
            return Err(Error::Config(format!(
                "krylov_dim must be at least 4, got {}",
                self.propagator.krylov_dim
            )));
        }
        if !(self.propagator.substep > 0.0) {
            return Err(Error::Config("propagator substep must be positive".into()));
        }
        if self.propagator.dense_threshold == 0 {
            return Err(Error::Config("dense_threshold must be positive".into()));
        }
        let report = validate_sequences(
            &self.particle_sequence,
            &self.couplings,
            self.sequence_tolerance,
        )?;
        let max_n1 = self
            .particle_sequence
            .iter()
            .map(|p| p.0)
            .max()
            .unwrap_or(0);
        let max_n2 = self
            .particle_sequence
            .iter()
            .map(|p| p.1)
            .max()
            .unwrap_or(0);
        if self.fock_cutoffs.species1 < max_n1 || self.fock_cutoffs.species2 < max_n2 {
            return Err(Error::Config(format!(
                "Fock cutoffs ({}, {}) must be at least the largest sequence pair ({max_n1}, {max_n2})",
                self.fock_cutoffs.species1, self.fock_cutoffs.species2
            )));
        }
        Ok(report)
    }

    /// Build the lattice model described by this configuration.
    pub fn build_model(&self) -> Result<LatticeModel> {
        LatticeModel::new(
            self.lattice.dimension,
            self.lattice.sites_per_axis,
            self.lattice.spacing,
            &self.potentials.v1,
            &self.potentials.v2,
            &self.potentials.v12,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn laplacian_1d_l4_stencil_and_spectrum() {
        let lap = build_laplacian(1, 4, 1.0).unwrap();
        for i in 0..4 {
            assert_abs_diff_eq!(lap[(i, i)], 2.0);
            assert_abs_diff_eq!(lap[(i, (i + 1) % 4)], -1.0);
            assert_abs_diff_eq!(lap[(i, (i + 3) % 4)], -1.0);
        }
        let mut eigs: Vec<f64> = lap.symmetric_eigen().eigenvalues.iter().copied().collect();
        eigs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let expected = [0.0, 2.0, 2.0, 4.0];
        for (e, want) in eigs.iter().zip(expected) {
            assert_abs_diff_eq!(*e, want, epsilon = 1e-12);
        }
    }

    #[test]
    fn laplacian_l2_wrap() {
        let lap = build_laplacian(1, 2, 0.5).unwrap();
        assert_abs_diff_eq!(lap[(0, 0)], 8.0);
        assert_abs_diff_eq!(lap[(1, 1)], 8.0);
        assert_abs_diff_eq!(lap[(0, 1)], -8.0);
        assert_abs_diff_eq!(lap[(1, 0)], -8.0);
    }

    #[test]
    fn laplacian_row_sums_vanish() {
        for (d, l) in [(1, 5), (2, 3), (3, 2)] {
            let lap = build_laplacian(d, l, 0.7).unwrap();
            for i in 0..lap.nrows() {
                let row_sum: f64 = lap.row(i).iter().sum();
                assert_abs_diff_eq!(row_sum, 0.0, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn laplacian_rejects_degenerate_input() {
        assert!(build_laplacian(1, 1, 1.0).is_err());
        assert!(build_laplacian(1, 4, 0.0).is_err());
        assert!(build_laplacian(0, 4, 1.0).is_err());
        assert!(build_laplacian(4, 4, 1.0).is_err());
    }

    #[test]
    fn laplacian_positive_semidefinite_on_random_vectors() {
        let lap = build_laplacian(2, 4, 0.8).unwrap();
        let m = lap.nrows();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..1000 {
            let psi = nalgebra::DVector::<f64>::from_fn(m, |_, _| rng.gen::<f64>() - 0.5);
            let quad = psi.dot(&(&lap * &psi));
            assert!(quad >= -1e-12 * psi.norm_squared());
        }
    }

    #[test]
    fn single_site_model_has_zero_kinetic_term() {
        let z = PotentialSpec::zero();
        let model = LatticeModel::single_mode(1.0, &z, &z, &z).unwrap();
        assert_eq!(model.total_sites, 1);
        assert_abs_diff_eq!(model.laplacian[(0, 0)], 0.0);
    }

    #[test]
    fn potential_onsite_values() {
        let g = PotentialSpec::gaussian(2.0, 1.0);
        let v = sample_potential(&g, 1, 4, 1.0).unwrap();
        assert_abs_diff_eq!(v[(0, 0)], 2.0);
        assert_abs_diff_eq!(v[(0, 1)], 2.0 * (-1.0f64).exp(), epsilon = 1e-15);

        let sc = PotentialSpec {
            kind: PotentialKind::SoftCoulomb,
            strength: 1.0,
            range: 1.0,
        };
        let v = sample_potential(&sc, 1, 4, 1.0).unwrap();
        assert_abs_diff_eq!(v[(0, 0)], 1.0);

        let z = PotentialSpec::zero();
        let v = sample_potential(&z, 2, 3, 1.0).unwrap();
        assert!(v.iter().all(|&x| x == 0.0));

        let contact = PotentialSpec {
            kind: PotentialKind::Contact,
            strength: 3.0,
            range: 1.0,
        };
        let v = sample_potential(&contact, 2, 3, 0.5).unwrap();
        assert_abs_diff_eq!(v[(0, 0)], 3.0 / 0.25);
        assert_abs_diff_eq!(v[(0, 1)], 0.0);

        let yukawa = PotentialSpec {
            kind: PotentialKind::Yukawa,
            strength: 1.0,
            range: 2.0,
        };
        let v = sample_potential(&yukawa, 1, 4, 1.0).unwrap();
        // On-site value replaced by the value at r = h/2.
        assert_abs_diff_eq!(v[(0, 0)], (-0.25f64).exp() / 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(v[(0, 1)], (-0.5f64).exp(), epsilon = 1e-15);
    }

    #[test]
    fn potential_symmetry_and_shift_invariance() {
        // Exact symmetry and periodic shift invariance in 2D.
        let spec = PotentialSpec::gaussian(-1.3, 0.9);
        let l = 4;
        let v = sample_potential(&spec, 2, l, 0.6).unwrap();
        let m = l * l;
        let shift = |i: usize, s1: usize, s2: usize| -> usize {
            let (a, b) = (i / l, i % l);
            ((a + s1) % l) * l + (b + s2) % l
        };
        for i in 0..m {
            for j in 0..m {
                assert_eq!(v[(i, j)], v[(j, i)]);
                for s1 in 0..l {
                    for s2 in 0..l {
                        assert_eq!(v[(i, j)], v[(shift(i, s1, s2), shift(j, s1, s2))]);
                    }
                }
            }
        }
    }

    #[test]
    fn sequence_validation_examples() {
        let sym = CouplingConstants::symmetric();
        let report = validate_sequences(&[(2, 2), (4, 4), (8, 8)], &sym, 1.0).unwrap();
        for (d1, d2) in &report.deviations {
            assert_abs_diff_eq!(*d1, 0.0);
            assert_abs_diff_eq!(*d2, 0.0);
        }
        assert_abs_diff_eq!(report.max_n1_over_n2, 1.0);
        assert_abs_diff_eq!(report.max_geom_over_total, 0.5);

        let skew = CouplingConstants::new(2.0 / 3.0, 1.0 / 3.0).unwrap();
        let report = validate_sequences(&[(2, 1), (4, 2)], &skew, 1.0).unwrap();
        for (d1, d2) in &report.deviations {
            assert!(*d1 < 1e-15 && *d2 < 1e-15);
        }

        let err = validate_sequences(&[(10, 1)], &sym, 0.1).unwrap_err();
        let msg = err.to_string();
        assert!(
            msg.contains("(10, 1)"),
            "rejection must name the pair: {msg}"
        );
    }

    #[test]
    fn sequence_validation_matches_direct_reimplementation() {
        // Cross-check acceptance against a direct restatement of the two inequalities.
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let couplings = CouplingConstants::new(0.4, 0.6).unwrap();
        let d_tol = 0.8;
        for _ in 0..500 {
            let n1 = rng.gen_range(1..40usize);
            let n2 = rng.gen_range(1..40usize);
            let accepted = validate_sequences(&[(n1, n2)], &couplings, d_tol).is_ok();
            let (f1, f2) = (n1 as f64, n2 as f64);
            let expected = (f1 / (f1 + f2) - 0.4).abs() <= d_tol / f2
                && (f2 / (f1 + f2) - 0.6).abs() <= d_tol / f1;
            assert_eq!(accepted, expected, "pair ({n1}, {n2})");
        }
    }

    #[test]
    fn run_config_roundtrip_and_validation() {
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
            particle_sequence: vec![(2, 2), (4, 4)],
            sequence_tolerance: 1.0,
            time_grid: TimeGridConfig {
                t_final: 0.5,
                dt: 1e-3,
                sample_stride: 250,
            },
            fock_cutoffs: FockCutoffsConfig {
                species1: 12,
                species2: 12,
            },
            propagator: PropagatorSettings::default(),
            initial_state: InitialStateConfig::default(),
            output: OutputConfig::default(),
            seed: 7,
        };
        config.validate().unwrap();
        let text = serde_json::to_string_pretty(&config).unwrap();
        let back: RunConfig = serde_json::from_str(&text).unwrap();
        back.validate().unwrap();
        assert_eq!(back.particle_sequence, config.particle_sequence);

        let mut bad = config.clone();
        bad.fock_cutoffs.species1 = 3;
        assert!(bad.validate().is_err());
    }
}
