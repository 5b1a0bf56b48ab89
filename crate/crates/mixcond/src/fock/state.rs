//! States of the truncated two-species Fock space: one-body vectors, fixed
//! sector states, weighted sector collections, and coherent states.

use std::collections::BTreeMap;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};
use crate::fock::basis::{BasisRegistry, SectorBasis};
use crate::fock::ladder::{apply_smeared, random_unit_vector, SmearKind};

/// Default bound above which a coherent state's truncation deficit raises the
/// warning flag on the constructed state.
pub const DEFAULT_DEFICIT_BOUND: f64 = 1e-6;

/// A one-body lattice function with its volume element; norms and inner
/// products are lattice-weighted (`<f, g> = h^d sum_i conj(f_i) g_i`).
#[derive(Debug, Clone)]
pub struct OneBodyVector {
    pub values: DVector<Complex64>,
    pub vol: f64,
}

impl OneBodyVector {
    pub fn new(values: DVector<Complex64>, vol: f64) -> Self {
        OneBodyVector { values, vol }
    }

    /// The lattice unit vector `e_mode / sqrt(h^d)` (unit lattice-weighted norm).
    pub fn basis_vector(modes: usize, mode: usize, vol: f64) -> Self {
        let mut values = DVector::from_element(modes, Complex64::new(0.0, 0.0));
        values[mode] = Complex64::from(1.0 / vol.sqrt());
        OneBodyVector { values, vol }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.len() == 0
    }

    pub fn norm_squared(&self) -> f64 {
        self.vol * self.values.norm_squared()
    }

    pub fn norm(&self) -> f64 {
        self.norm_squared().sqrt()
    }

    pub fn inner(&self, other: &OneBodyVector) -> Complex64 {
        self.values.dotc(&other.values) * Complex64::from(self.vol)
    }

    /// Coefficients on the discrete mode basis: `phi_i = sqrt(h^d) f_i`, so
    /// that `sum_i |phi_i|^2` equals the lattice-weighted squared norm.
    pub fn mode_amplitudes(&self) -> DVector<Complex64> {
        &self.values * Complex64::from(self.vol.sqrt())
    }

    pub fn scale(&self, factor: f64) -> Self {
        OneBodyVector {
            values: &self.values * Complex64::from(factor),
            vol: self.vol,
        }
    }
}

/// Which number observable to take an expectation of.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NumberObservable {
    Species1,
    Species2,
    Product,
}

/// Coefficient vector over the product occupation basis of one fixed sector
/// `(n1, n2)`. Stored as a `dim1 x dim2` matrix: rows index the species-1
/// basis, columns the species-2 basis.
#[derive(Debug, Clone)]
pub struct SectorState {
    pub basis1: Arc<SectorBasis>,
    pub basis2: Arc<SectorBasis>,
    pub coeffs: DMatrix<Complex64>,
    pub t: f64,
}

impl SectorState {
    pub fn new(
        basis1: Arc<SectorBasis>,
        basis2: Arc<SectorBasis>,
        coeffs: DMatrix<Complex64>,
    ) -> Result<Self> {
        if coeffs.nrows() != basis1.len() || coeffs.ncols() != basis2.len() {
            return Err(Error::Dimension(format!(
                "coefficients are {}x{}, bases have dims ({}, {})",
                coeffs.nrows(),
                coeffs.ncols(),
                basis1.len(),
                basis2.len()
            )));
        }
        if coeffs
            .iter()
            .any(|z| !(z.re.is_finite() && z.im.is_finite()))
        {
            return Err(Error::Numerical(
                "sector coefficients must be finite".into(),
            ));
        }
        Ok(SectorState {
            basis1,
            basis2,
            coeffs,
            t: 0.0,
        })
    }

    pub fn n1(&self) -> usize {
        self.basis1.particles()
    }

    pub fn n2(&self) -> usize {
        self.basis2.particles()
    }

    pub fn dim(&self) -> usize {
        self.coeffs.len()
    }

    pub fn norm(&self) -> f64 {
        self.coeffs.norm()
    }

    /// The product state `u^(x n1) (x) v^(x n2)`, normalized when `u`, `v` are.
    pub fn product_state(
        u: &OneBodyVector,
        v: &OneBodyVector,
        n1: usize,
        n2: usize,
        registry: &Arc<BasisRegistry>,
    ) -> Result<Self> {
        let basis1 = registry.get(n1)?;
        let basis2 = registry.get(n2)?;
        let c1 = product_coefficients(u, &basis1)?;
        let c2 = product_coefficients(v, &basis2)?;
        let coeffs = DMatrix::from_fn(basis1.len(), basis2.len(), |a, b| c1[a] * c2[b]);
        SectorState::new(basis1, basis2, coeffs)
    }
}

/// Coefficients of the normalized symmetric power `f^(x n)` over the occupation
/// basis: `sqrt(n!/prod m_i!) prod phi_i^{m_i}` with `phi` the mode amplitudes.
pub(crate) fn product_coefficients(
    f: &OneBodyVector,
    basis: &SectorBasis,
) -> Result<DVector<Complex64>> {
    if f.len() != basis.modes() {
        return Err(Error::Dimension(format!(
            "orbital has {} entries, basis has {} modes",
            f.len(),
            basis.modes()
        )));
    }
    let phi = f.mode_amplitudes();
    let n = basis.particles();
    Ok(DVector::from_fn(basis.len(), |idx, _| {
        let occ = basis.occupation(idx);
        let mut amp = Complex64::new(1.0, 0.0);
        let mut denom = 1.0;
        for (mode, &m) in occ.iter().enumerate() {
            for _ in 0..m {
                amp *= phi[mode];
            }
            denom *= factorial(m as usize);
        }
        amp * Complex64::from((factorial(n) / denom).sqrt())
    }))
}

pub(crate) fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// A weighted collection of sector states with per-species cutoffs; the home
/// of truncated coherent states. Sector weights are folded into the
/// coefficients, and iteration order over sectors is deterministic.
#[derive(Debug, Clone)]
pub struct TruncatedFockState {
    pub cutoff1: usize,
    pub cutoff2: usize,
    pub t: f64,
    /// Raised when a coherent construction lost more mass than its bound.
    pub deficit_flag: bool,
    sectors: BTreeMap<(usize, usize), DMatrix<Complex64>>,
    registry: Arc<BasisRegistry>,
}

impl TruncatedFockState {
    pub fn empty(cutoff1: usize, cutoff2: usize, registry: Arc<BasisRegistry>) -> Self {
        TruncatedFockState {
            cutoff1,
            cutoff2,
            t: 0.0,
            deficit_flag: false,
            sectors: BTreeMap::new(),
            registry,
        }
    }

    /// The vacuum state.
    pub fn vacuum(registry: Arc<BasisRegistry>) -> Result<Self> {
        let mut state = TruncatedFockState::empty(0, 0, registry);
        state.insert_sector(0, 0, DMatrix::from_element(1, 1, Complex64::new(1.0, 0.0)))?;
        Ok(state)
    }

    pub fn modes(&self) -> usize {
        self.registry.modes()
    }

    pub fn registry(&self) -> &Arc<BasisRegistry> {
        &self.registry
    }

    pub fn basis(&self, n: usize) -> Result<Arc<SectorBasis>> {
        self.registry.get(n)
    }

    pub fn insert_sector(
        &mut self,
        n1: usize,
        n2: usize,
        coeffs: DMatrix<Complex64>,
    ) -> Result<()> {
        let b1 = self.registry.get(n1)?;
        let b2 = self.registry.get(n2)?;
        if coeffs.nrows() != b1.len() || coeffs.ncols() != b2.len() {
            return Err(Error::Dimension(format!(
                "sector ({n1}, {n2}) expects {}x{} coefficients, got {}x{}",
                b1.len(),
                b2.len(),
                coeffs.nrows(),
                coeffs.ncols()
            )));
        }
        if n1 > self.cutoff1 || n2 > self.cutoff2 {
            return Err(Error::Dimension(format!(
                "sector ({n1}, {n2}) outside cutoffs ({}, {})",
                self.cutoff1, self.cutoff2
            )));
        }
        self.sectors.insert((n1, n2), coeffs);
        Ok(())
    }

    pub fn sector(&self, n1: usize, n2: usize) -> Option<&DMatrix<Complex64>> {
        self.sectors.get(&(n1, n2))
    }

    /// Deterministically ordered iteration over occupied sectors.
    pub fn sectors(&self) -> impl Iterator<Item = (&(usize, usize), &DMatrix<Complex64>)> {
        self.sectors.iter()
    }

    pub fn sectors_mut(
        &mut self,
    ) -> impl Iterator<Item = (&(usize, usize), &mut DMatrix<Complex64>)> {
        self.sectors.iter_mut()
    }

    pub fn sector_labels(&self) -> Vec<(usize, usize)> {
        self.sectors.keys().copied().collect()
    }

    pub fn total_norm_squared(&self) -> f64 {
        self.sectors.values().map(|c| c.norm_squared()).sum()
    }

    /// Mass lost beyond the cutoffs: `1 - total norm^2`. Meaningful for states
    /// built from a normalized construction (coherent states keep it nonnegative).
    pub fn deficit(&self) -> f64 {
        1.0 - self.total_norm_squared()
    }

    /// Inner product `<self, other>` over common sectors.
    pub fn inner(&self, other: &TruncatedFockState) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for (label, coeffs) in &self.sectors {
            if let Some(other_coeffs) = other.sectors.get(label) {
                acc += coeffs.dotc(other_coeffs);
            }
        }
        acc
    }

    pub fn scale(&mut self, factor: Complex64) {
        for coeffs in self.sectors.values_mut() {
            *coeffs *= factor;
        }
    }

    /// Sum of the per-sector states of `other` into `self`, extending cutoffs as needed.
    pub fn add_assign(&mut self, other: &TruncatedFockState, weight: Complex64) -> Result<()> {
        self.cutoff1 = self.cutoff1.max(other.cutoff1);
        self.cutoff2 = self.cutoff2.max(other.cutoff2);
        for (label, coeffs) in &other.sectors {
            match self.sectors.get_mut(label) {
                Some(existing) => *existing += coeffs * weight,
                None => {
                    self.sectors.insert(*label, coeffs * weight);
                }
            }
        }
        Ok(())
    }

    /// Apply a smeared ladder operator on one species to every sector,
    /// extending the relevant cutoff by one so no amplitude is lost.
    pub fn apply_ladder(
        &self,
        f: &OneBodyVector,
        kind: SmearKind,
        species: Species,
    ) -> Result<TruncatedFockState> {
        let (mut cutoff1, mut cutoff2) = (self.cutoff1, self.cutoff2);
        if kind == SmearKind::Create {
            match species {
                Species::One => cutoff1 += 1,
                Species::Two => cutoff2 += 1,
            }
        }
        let mut out = TruncatedFockState::empty(cutoff1, cutoff2, self.registry.clone());
        out.t = self.t;
        for (&(n1, n2), coeffs) in &self.sectors {
            let (n_active, delta): (usize, isize) = match (species, kind) {
                (Species::One, SmearKind::Create) => (n1, 1),
                (Species::One, SmearKind::Annihilate) => (n1, -1),
                (Species::Two, SmearKind::Create) => (n2, 1),
                (Species::Two, SmearKind::Annihilate) => (n2, -1),
            };
            if delta < 0 && n_active == 0 {
                continue; // annihilation of the vacuum component
            }
            let target_n = (n_active as isize + delta) as usize;
            let from = self.registry.get(n_active)?;
            let to = self.registry.get(target_n)?;
            let mapped = match species {
                Species::One => {
                    // columns are fixed species-2 indices
                    let mut block =
                        DMatrix::from_element(to.len(), coeffs.ncols(), Complex64::new(0.0, 0.0));
                    for col in 0..coeffs.ncols() {
                        let src = DVector::from_column_slice(coeffs.column(col).as_slice());
                        let dst = apply_smeared(f, kind, &from, &to, &src)?;
                        block.set_column(col, &dst);
                    }
                    block
                }
                Species::Two => {
                    let mut block =
                        DMatrix::from_element(coeffs.nrows(), to.len(), Complex64::new(0.0, 0.0));
                    for row in 0..coeffs.nrows() {
                        let src = DVector::from_fn(coeffs.ncols(), |b, _| coeffs[(row, b)]);
                        let dst = apply_smeared(f, kind, &from, &to, &src)?;
                        for b in 0..to.len() {
                            block[(row, b)] = dst[b];
                        }
                    }
                    block
                }
            };
            let (t1, t2) = match species {
                Species::One => (target_n, n2),
                Species::Two => (n1, target_n),
            };
            let mut merged = mapped;
            if let Some(existing) = out.sectors.get(&(t1, t2)) {
                merged += existing;
            }
            out.sectors.insert((t1, t2), merged);
        }
        Ok(out)
    }

    /// Multiply each sector by a function of its particle numbers.
    pub fn scale_sectors(&self, weight: impl Fn(usize, usize) -> f64) -> TruncatedFockState {
        let mut out = self.clone();
        for (&(n1, n2), coeffs) in out.sectors.iter_mut() {
            *coeffs *= Complex64::from(weight(n1, n2));
        }
        out
    }

    /// Distribution of squared norm over sector labels.
    pub fn sector_masses(&self) -> BTreeMap<(usize, usize), f64> {
        self.sectors
            .iter()
            .map(|(&label, coeffs)| (label, coeffs.norm_squared()))
            .collect()
    }

    /// Wrap a single sector state.
    pub fn from_sector(state: &SectorState, registry: Arc<BasisRegistry>) -> Result<Self> {
        let mut out = TruncatedFockState::empty(state.n1(), state.n2(), registry);
        out.t = state.t;
        out.insert_sector(state.n1(), state.n2(), state.coeffs.clone())?;
        Ok(out)
    }
}

/// Which tensor factor of the two-species space an operator acts on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Species {
    One,
    Two,
}

/// The truncated coherent state with per-species amplitudes `f` and `g`:
/// sector `(n1, n2)` carries `e^{-||f||^2/2} f^(x n1)/sqrt(n1!)` tensor the
/// species-2 analogue, expressed in occupation coordinates. The truncation
/// deficit is the product-Poisson tail beyond the cutoffs; when it exceeds
/// `deficit_bound`, the state is flagged.
pub fn coherent_state(
    f: &OneBodyVector,
    g: &OneBodyVector,
    cutoff1: usize,
    cutoff2: usize,
    deficit_bound: f64,
    registry: &Arc<BasisRegistry>,
) -> Result<TruncatedFockState> {
    if f.len() != registry.modes() || g.len() != registry.modes() {
        return Err(Error::Dimension(format!(
            "orbitals have {} and {} entries, registry has {} modes",
            f.len(),
            g.len(),
            registry.modes()
        )));
    }
    let weights1 = coherent_species_coefficients(f, cutoff1, registry)?;
    let weights2 = coherent_species_coefficients(g, cutoff2, registry)?;
    let mut state = TruncatedFockState::empty(cutoff1, cutoff2, registry.clone());
    for (n1, c1) in weights1.iter().enumerate() {
        for (n2, c2) in weights2.iter().enumerate() {
            let coeffs = DMatrix::from_fn(c1.len(), c2.len(), |a, b| c1[a] * c2[b]);
            state.insert_sector(n1, n2, coeffs)?;
        }
    }
    let deficit = state.deficit();
    state.deficit_flag = deficit > deficit_bound;
    Ok(state)
}

/// Per-sector coefficient vectors of a single-species coherent state
/// `e^{-||f||^2/2} sum_n f^(x n)/sqrt(n!)` up to the cutoff.
fn coherent_species_coefficients(
    f: &OneBodyVector,
    cutoff: usize,
    registry: &Arc<BasisRegistry>,
) -> Result<Vec<DVector<Complex64>>> {
    let phi = f.mode_amplitudes();
    let prefactor = (-f.norm_squared() / 2.0).exp();
    let mut out = Vec::with_capacity(cutoff + 1);
    for n in 0..=cutoff {
        let basis = registry.get(n)?;
        let scale = prefactor / factorial(n).sqrt();
        let coeffs = DVector::from_fn(basis.len(), |idx, _| {
            let occ = basis.occupation(idx);
            let mut amp = Complex64::new(1.0, 0.0);
            let mut denom = 1.0;
            for (mode, &m) in occ.iter().enumerate() {
                for _ in 0..m {
                    amp *= phi[mode];
                }
                denom *= factorial(m as usize);
            }
            // f^(x n) coefficient on |m> is sqrt(n!/prod m!) prod phi^m; the
            // 1/sqrt(n!) from the coherent series cancels the sqrt(n!).
            amp * Complex64::from(scale * (factorial(n) / denom).sqrt())
        });
        out.push(coeffs);
    }
    Ok(out)
}

/// Poisson(lambda) probabilities `P(X = k)` for `k = 0..=k_max`.
pub fn poisson_pmf(lambda: f64, k_max: usize) -> Vec<f64> {
    let mut pmf = Vec::with_capacity(k_max + 1);
    let mut p = (-lambda).exp();
    pmf.push(p);
    for k in 1..=k_max {
        p *= lambda / k as f64;
        pmf.push(p);
    }
    pmf
}

/// Expectation of `n1^p n2^q` over the truncated, renormalized state, with
/// `(p, q)` selected by the observable.
pub fn number_expectation(state: &TruncatedFockState, which: NumberObservable) -> Result<f64> {
    let total = state.total_norm_squared();
    if total <= 0.0 {
        return Err(Error::Numerical(
            "number expectation of a zero-norm state".into(),
        ));
    }
    let mut acc = 0.0;
    for (&(n1, n2), coeffs) in state.sectors() {
        let weight = coeffs.norm_squared();
        let value = match which {
            NumberObservable::Species1 => n1 as f64,
            NumberObservable::Species2 => n2 as f64,
            NumberObservable::Product => (n1 * n2) as f64,
        };
        acc += weight * value;
    }
    Ok(acc / total)
}

/// A random normalized state of one sector.
pub fn random_sector_state(
    n1: usize,
    n2: usize,
    registry: &Arc<BasisRegistry>,
    rng: &mut impl Rng,
) -> Result<SectorState> {
    let basis1 = registry.get(n1)?;
    let basis2 = registry.get(n2)?;
    let flat = random_unit_vector(basis1.len() * basis2.len(), rng);
    let coeffs = DMatrix::from_fn(basis1.len(), basis2.len(), |a, b| {
        flat[b * basis1.len() + a]
    });
    SectorState::new(basis1, basis2, coeffs)
}

/// A random normalized state spread over all sectors below the cutoffs.
pub fn random_truncated_state(
    cutoff1: usize,
    cutoff2: usize,
    registry: &Arc<BasisRegistry>,
    rng: &mut impl Rng,
) -> Result<TruncatedFockState> {
    let mut state = TruncatedFockState::empty(cutoff1, cutoff2, registry.clone());
    for n1 in 0..=cutoff1 {
        for n2 in 0..=cutoff2 {
            let b1 = registry.get(n1)?;
            let b2 = registry.get(n2)?;
            let coeffs = DMatrix::from_fn(b1.len(), b2.len(), |_, _| {
                Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)
            });
            state.insert_sector(n1, n2, coeffs)?;
        }
    }
    let norm = state.total_norm_squared().sqrt();
    state.scale(Complex64::from(1.0 / norm));
    Ok(state)
}
