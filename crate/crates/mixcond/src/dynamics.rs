//! Mean-field Hamiltonians on fixed-number sectors and their time evolution.
//!
//! On the sector `(n1, n2)` the Hamiltonian is
//!
//! ```text
//! H = sum_ij T_ij b*_i b_j  +  1/(2 N1) sum_ij V1(i,j) b*_i b*_j b_j b_i
//!   + (species-2 copy with 1/(2 N2))
//!   + 1/(N1+N2) sum_ij V12(i,j) b*_i c*_j c_j b_i
//! ```
//!
//! with `T` the lattice Laplacian and `(N1, N2)` the reference particle
//! numbers of the run (not the sector's own counts). The two-body terms are
//! diagonal in the occupation basis, so the operator splits into one-body
//! hops per species plus a diagonal over the product basis; propagation
//! exploits that structure. Applied to an `n`-particle occupation state the
//! normal-ordered quartic reproduces the first-quantized pair sum
//! `sum_{j<k} V(x_j - x_k)`, with coincident sites allowed for distinct
//! particles.

use std::collections::BTreeMap;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fock::basis::{BasisRegistry, SectorBasis};
use crate::fock::ladder::one_body_operator;
use crate::fock::state::{OneBodyVector, SectorState, Species, TruncatedFockState};
use crate::fock::SmearKind;
use crate::model::{LatticeModel, PropagationMethod, PropagatorSettings};

/// The mean-field Hamiltonian restricted to one sector, kept in split form:
/// one-body kinetic blocks per species and the interaction diagonal.
#[derive(Debug, Clone)]
pub struct SectorHamiltonian {
    pub n1: usize,
    pub n2: usize,
    /// Reference particle numbers entering the mean-field denominators.
    pub n_ref1: f64,
    pub n_ref2: f64,
    pub basis1: Arc<SectorBasis>,
    pub basis2: Arc<SectorBasis>,
    /// Fingerprint of the lattice model this block was assembled from.
    pub model_fingerprint: u64,
    kinetic1: DMatrix<f64>,
    kinetic2: DMatrix<f64>,
    /// Interaction diagonal over the product basis, as a `dim1 x dim2` grid.
    interaction: DMatrix<f64>,
}

impl SectorHamiltonian {
    pub fn dim(&self) -> usize {
        self.basis1.len() * self.basis2.len()
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.basis1.len(), self.basis2.len())
    }

    /// Apply to sector coefficients: `K1 X + X K2 + D .* X` (`K2` symmetric).
    pub fn apply(&self, x: &DMatrix<Complex64>) -> DMatrix<Complex64> {
        let xr = x.map(|z| z.re);
        let xi = x.map(|z| z.im);
        let yr = &self.kinetic1 * &xr + &xr * &self.kinetic2;
        let yi = &self.kinetic1 * &xi + &xi * &self.kinetic2;
        DMatrix::from_fn(x.nrows(), x.ncols(), |a, b| {
            Complex64::new(
                yr[(a, b)] + self.interaction[(a, b)] * xr[(a, b)],
                yi[(a, b)] + self.interaction[(a, b)] * xi[(a, b)],
            )
        })
    }

    /// Energy expectation `<x, H x> / <x, x>`.
    pub fn expectation(&self, x: &DMatrix<Complex64>) -> f64 {
        let hx = self.apply(x);
        x.dotc(&hx).re / x.norm_squared()
    }

    /// Materialize the dense real symmetric matrix over the product basis,
    /// with flat index `p = b * dim1 + a` (column-major vectorization of the
    /// coefficient grid).
    pub fn to_dense(&self) -> DMatrix<f64> {
        let (d1, d2) = self.dims();
        let n = d1 * d2;
        let mut h = DMatrix::zeros(n, n);
        for b in 0..d2 {
            for a in 0..d1 {
                let p = b * d1 + a;
                for a2 in 0..d1 {
                    h[(b * d1 + a2, p)] += self.kinetic1[(a2, a)];
                }
                for b2 in 0..d2 {
                    h[(b2 * d1 + a, p)] += self.kinetic2[(b2, b)];
                }
                h[(p, p)] += self.interaction[(a, b)];
            }
        }
        h
    }
}

/// Assemble the Hamiltonian block for sector `(n1, n2)` with reference
/// particle numbers `(n_ref1, n_ref2)` in the mean-field denominators.
pub fn assemble_sector_hamiltonian(
    model: &LatticeModel,
    n_ref1: f64,
    n_ref2: f64,
    n1: usize,
    n2: usize,
    registry: &Arc<BasisRegistry>,
    settings: &PropagatorSettings,
) -> Result<SectorHamiltonian> {
    if !(n_ref1 > 0.0 && n_ref2 > 0.0) {
        return Err(Error::Config(format!(
            "reference particle numbers must be positive, got ({n_ref1}, {n_ref2})"
        )));
    }
    let basis1 = registry.get(n1)?;
    let basis2 = registry.get(n2)?;
    let dim = basis1.len() * basis2.len();
    if dim > settings.sector_dimension_limit {
        return Err(Error::SectorLimit(format!(
            "sector ({n1}, {n2}) has dimension {dim}, above the limit {}",
            settings.sector_dimension_limit
        )));
    }
    let kinetic1 = one_body_operator(&model.laplacian, &basis1)?;
    let kinetic2 = one_body_operator(&model.laplacian, &basis2)?;

    let intra1 = intra_species_diagonal(&model.v1, &basis1, n_ref1);
    let intra2 = intra_species_diagonal(&model.v2, &basis2, n_ref2);
    let occ1 = occupancy_matrix(&basis1);
    let occ2 = occupancy_matrix(&basis2);
    let cross = (&occ1 * &model.v12 * occ2.transpose()) / (n_ref1 + n_ref2);
    let interaction = DMatrix::from_fn(basis1.len(), basis2.len(), |a, b| {
        intra1[a] + intra2[b] + cross[(a, b)]
    });

    Ok(SectorHamiltonian {
        n1,
        n2,
        n_ref1,
        n_ref2,
        basis1,
        basis2,
        model_fingerprint: model.fingerprint(),
        kinetic1,
        kinetic2,
        interaction,
    })
}

/// `1/(2 N) sum_ij V(i,j)(m_i m_j - delta_ij m_i)` for each occupation: the
/// pair sum over distinct particles, coincident sites included.
fn intra_species_diagonal(v: &DMatrix<f64>, basis: &SectorBasis, n_ref: f64) -> DVector<f64> {
    let m = basis.modes();
    DVector::from_fn(basis.len(), |idx, _| {
        let occ = basis.occupation(idx);
        let mut quad = 0.0;
        let mut onsite = 0.0;
        for i in 0..m {
            let mi = occ[i] as f64;
            if mi == 0.0 {
                continue;
            }
            onsite += v[(i, i)] * mi;
            for j in 0..m {
                let mj = occ[j] as f64;
                if mj != 0.0 {
                    quad += v[(i, j)] * mi * mj;
                }
            }
        }
        (quad - onsite) / (2.0 * n_ref)
    })
}

fn occupancy_matrix(basis: &SectorBasis) -> DMatrix<f64> {
    DMatrix::from_fn(basis.len(), basis.modes(), |idx, mode| {
        basis.occupation(idx)[mode] as f64
    })
}

/// Reusable propagator for one sector block: exact eigendecomposition below
/// the dense threshold, substepped Lanczos exponentials above.
pub struct SectorPropagator {
    pub hamiltonian: SectorHamiltonian,
    dense: Option<(DVector<f64>, DMatrix<f64>)>,
    settings: PropagatorSettings,
}

impl SectorPropagator {
    pub fn new(hamiltonian: SectorHamiltonian, settings: &PropagatorSettings) -> Result<Self> {
        if settings.krylov_dim < 4 {
            return Err(Error::Config(format!(
                "krylov_dim must be at least 4, got {}",
                settings.krylov_dim
            )));
        }
        let use_dense = match settings.method {
            PropagationMethod::Auto => hamiltonian.dim() <= settings.dense_threshold,
            PropagationMethod::DenseEig => true,
            PropagationMethod::Krylov => false,
        };
        let dense = if use_dense {
            let eig = hamiltonian.to_dense().symmetric_eigen();
            // The eigensolver can mis-pair eigenvectors on strongly degenerate
            // spectra (free sectors are full of those); accept the
            // factorization only if it reproduces H on probe vectors,
            // otherwise propagate this block with Lanczos steps instead.
            if eigendecomposition_is_faithful(&hamiltonian, &eig.eigenvalues, &eig.eigenvectors) {
                Some((eig.eigenvalues, eig.eigenvectors))
            } else {
                None
            }
        } else {
            None
        };
        Ok(SectorPropagator {
            hamiltonian,
            dense,
            settings: settings.clone(),
        })
    }

    pub fn is_dense(&self) -> bool {
        self.dense.is_some()
    }

    /// Advance sector coefficients by `exp(-i H t)`.
    pub fn advance(&self, coeffs: &DMatrix<Complex64>, t: f64) -> Result<DMatrix<Complex64>> {
        if coeffs.nrows() != self.hamiltonian.basis1.len()
            || coeffs.ncols() != self.hamiltonian.basis2.len()
        {
            return Err(Error::Dimension(format!(
                "coefficients are {}x{}, sector expects {}x{}",
                coeffs.nrows(),
                coeffs.ncols(),
                self.hamiltonian.basis1.len(),
                self.hamiltonian.basis2.len()
            )));
        }
        if t == 0.0 {
            return Ok(coeffs.clone());
        }
        match &self.dense {
            Some((vals, vecs)) => Ok(self.dense_advance(vals, vecs, coeffs, t)),
            None => self.krylov_advance(coeffs, t),
        }
    }

    fn dense_advance(
        &self,
        vals: &DVector<f64>,
        vecs: &DMatrix<f64>,
        coeffs: &DMatrix<Complex64>,
        t: f64,
    ) -> DMatrix<Complex64> {
        let (d1, d2) = self.hamiltonian.dims();
        let flat_re = DVector::from_fn(d1 * d2, |p, _| coeffs[(p % d1, p / d1)].re);
        let flat_im = DVector::from_fn(d1 * d2, |p, _| coeffs[(p % d1, p / d1)].im);
        let cr = vecs.transpose() * flat_re;
        let ci = vecs.transpose() * flat_im;
        let mut spectral_re = DVector::zeros(vals.len());
        let mut spectral_im = DVector::zeros(vals.len());
        for k in 0..vals.len() {
            let (sin, cos) = (-vals[k] * t).sin_cos();
            // (cr + i ci)(cos + i sin)
            spectral_re[k] = cr[k] * cos - ci[k] * sin;
            spectral_im[k] = cr[k] * sin + ci[k] * cos;
        }
        let out_re = vecs * spectral_re;
        let out_im = vecs * spectral_im;
        DMatrix::from_fn(d1, d2, |a, b| {
            let p = b * d1 + a;
            Complex64::new(out_re[p], out_im[p])
        })
    }

    fn krylov_advance(&self, coeffs: &DMatrix<Complex64>, t: f64) -> Result<DMatrix<Complex64>> {
        let substeps = (t.abs() / self.settings.substep).ceil().max(1.0) as usize;
        let tau = t / substeps as f64;
        let mut x = coeffs.clone();
        for _ in 0..substeps {
            x = self.krylov_substep_with_retry(&x, tau)?;
        }
        Ok(x)
    }

    fn krylov_substep_with_retry(
        &self,
        x: &DMatrix<Complex64>,
        tau: f64,
    ) -> Result<DMatrix<Complex64>> {
        const RETRY_LIMIT: usize = 8;
        let norm_in = x.norm();
        if norm_in == 0.0 {
            return Ok(x.clone());
        }
        let mut pieces = 1usize;
        for _ in 0..=RETRY_LIMIT {
            let tau_local = tau / pieces as f64;
            let mut y = x.clone();
            let mut ok = true;
            for _ in 0..pieces {
                y = self.krylov_step(&y, tau_local);
                let drift = (y.norm() - norm_in).abs() / norm_in;
                if !y.iter().all(|z| z.re.is_finite() && z.im.is_finite()) || drift > 1e-9 {
                    ok = false;
                    break;
                }
            }
            if ok {
                return Ok(y);
            }
            pieces *= 2;
        }
        Err(Error::Numerical(format!(
            "Krylov propagation failed to preserve the norm after {RETRY_LIMIT} substep halvings \
             (sector ({}, {}))",
            self.hamiltonian.n1, self.hamiltonian.n2
        )))
    }

    /// One Lanczos exponential step `exp(-i H tau) x`.
    fn krylov_step(&self, x: &DMatrix<Complex64>, tau: f64) -> DMatrix<Complex64> {
        let beta0 = x.norm();
        let kdim = self.settings.krylov_dim.min(self.hamiltonian.dim());
        let mut basis: Vec<DMatrix<Complex64>> = Vec::with_capacity(kdim);
        basis.push(x / Complex64::from(beta0));
        let mut alphas: Vec<f64> = Vec::with_capacity(kdim);
        let mut betas: Vec<f64> = Vec::with_capacity(kdim);
        for j in 0..kdim {
            let mut w = self.hamiltonian.apply(&basis[j]);
            let alpha = basis[j].dotc(&w).re;
            alphas.push(alpha);
            w -= &basis[j] * Complex64::from(alpha);
            if j > 0 {
                w -= &basis[j - 1] * Complex64::from(betas[j - 1]);
            }
            // One full reorthogonalization pass keeps the basis clean at
            // machine precision for the modest subspace sizes used here.
            for prev in &basis {
                let overlap = prev.dotc(&w);
                w -= prev * overlap;
            }
            let beta = w.norm();
            if beta < 1e-13 * beta0 || j + 1 == kdim {
                break; // invariant subspace: the exponential below is exact
            }
            betas.push(beta);
            basis.push(w / Complex64::from(beta));
        }
        let m = alphas.len();
        let mut tri = DMatrix::zeros(m, m);
        for j in 0..m {
            tri[(j, j)] = alphas[j];
            if j + 1 < m {
                tri[(j, j + 1)] = betas[j];
                tri[(j + 1, j)] = betas[j];
            }
        }
        let eig = tri.symmetric_eigen();
        // y = Q exp(-i lambda tau) Q^T e1 * beta0
        let mut y = vec![Complex64::new(0.0, 0.0); m];
        for k in 0..m {
            let phase = Complex64::from_polar(1.0, -eig.eigenvalues[k] * tau);
            let weight = phase * eig.eigenvectors[(0, k)] * beta0;
            for j in 0..m {
                y[j] += weight * eig.eigenvectors[(j, k)];
            }
        }
        let (d1, d2) = self.hamiltonian.dims();
        let mut out = DMatrix::from_element(d1, d2, Complex64::new(0.0, 0.0));
        for (j, coeff) in y.iter().enumerate() {
            out += &basis[j] * *coeff;
        }
        out
    }
}

/// Verify `Q L Q^T x = H x` on deterministic probe vectors.
fn eigendecomposition_is_faithful(
    hamiltonian: &SectorHamiltonian,
    vals: &DVector<f64>,
    vecs: &DMatrix<f64>,
) -> bool {
    use rand::{Rng, SeedableRng};
    let (d1, d2) = hamiltonian.dims();
    let dim = d1 * d2;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x70726f6265);
    for _ in 0..3 {
        let flat = DVector::<f64>::from_fn(dim, |_, _| rng.gen::<f64>() - 0.5);
        let grid = DMatrix::from_fn(d1, d2, |a, b| Complex64::new(flat[b * d1 + a], 0.0));
        let direct = hamiltonian.apply(&grid);
        let mut spectral = vecs.transpose() * &flat;
        for (s, l) in spectral.iter_mut().zip(vals.iter()) {
            *s *= *l;
        }
        let reconstructed = vecs * spectral;
        let mut defect = 0.0f64;
        let mut scale = 0.0f64;
        for b in 0..d2 {
            for a in 0..d1 {
                let d = direct[(a, b)].re;
                defect = defect.max((d - reconstructed[b * d1 + a]).abs());
                scale = scale.max(d.abs());
            }
        }
        if defect > 1e-9 * (1.0 + scale) {
            return false;
        }
    }
    true
}

/// Propagate a sector state by `exp(-i H t)`.
pub fn propagate_sector(
    state: &SectorState,
    hamiltonian: &SectorHamiltonian,
    t: f64,
    settings: &PropagatorSettings,
) -> Result<SectorState> {
    if t < 0.0 {
        return Err(Error::Config(format!(
            "propagation time must be nonnegative, got {t}"
        )));
    }
    let propagator = SectorPropagator::new(hamiltonian.clone(), settings)?;
    let coeffs = propagator.advance(&state.coeffs, t)?;
    let mut out = SectorState::new(state.basis1.clone(), state.basis2.clone(), coeffs)?;
    out.t = state.t + t;
    Ok(out)
}

/// Blockwise propagator for a truncated Fock state: one sector propagator per
/// occupied sector, all built from the same reference `(N1, N2)` denominators,
/// reusable across sample times. Sector blocks are independent, so they are
/// built and advanced in parallel; results do not depend on scheduling.
pub struct CoherentPropagator {
    propagators: BTreeMap<(usize, usize), SectorPropagator>,
}

impl CoherentPropagator {
    pub fn new(
        model: &LatticeModel,
        n_ref1: f64,
        n_ref2: f64,
        state: &TruncatedFockState,
        settings: &PropagatorSettings,
    ) -> Result<Self> {
        let registry = state.registry().clone();
        let labels = state.sector_labels();
        let propagators = labels
            .into_par_iter()
            .map(|(n1, n2)| {
                let h =
                    assemble_sector_hamiltonian(model, n_ref1, n_ref2, n1, n2, &registry, settings)
                        .map_err(|e| {
                            Error::Numerical(format!(
                                "sector ({n1}, {n2}): failed to assemble: {e}"
                            ))
                        })?;
                let p = SectorPropagator::new(h, settings)
                    .map_err(|e| Error::Numerical(format!("sector ({n1}, {n2}): {e}")))?;
                Ok(((n1, n2), p))
            })
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .collect();
        Ok(CoherentPropagator { propagators })
    }

    /// Advance every occupied sector by `t`; weights and the truncation
    /// deficit are untouched (each block evolves unitarily).
    pub fn advance(&self, state: &TruncatedFockState, t: f64) -> Result<TruncatedFockState> {
        let blocks: Vec<(&(usize, usize), &DMatrix<Complex64>)> = state.sectors().collect();
        let advanced = blocks
            .into_par_iter()
            .map(|(label, coeffs)| {
                let propagator = self.propagators.get(label).ok_or_else(|| {
                    Error::Numerical(format!(
                        "sector ({}, {}): no propagator built",
                        label.0, label.1
                    ))
                })?;
                let out = propagator.advance(coeffs, t).map_err(|e| {
                    Error::Numerical(format!("sector ({}, {}): {e}", label.0, label.1))
                })?;
                Ok((*label, out))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut out =
            TruncatedFockState::empty(state.cutoff1, state.cutoff2, state.registry().clone());
        out.t = state.t + t;
        out.deficit_flag = state.deficit_flag;
        for (label, coeffs) in advanced {
            out.insert_sector(label.0, label.1, coeffs)?;
        }
        Ok(out)
    }
}

/// Propagate a truncated Fock state for time `t` under the mean-field
/// Hamiltonian with reference numbers `(n_ref1, n_ref2)`.
pub fn propagate_coherent(
    state: &TruncatedFockState,
    model: &LatticeModel,
    n_ref1: f64,
    n_ref2: f64,
    t: f64,
    settings: &PropagatorSettings,
) -> Result<TruncatedFockState> {
    CoherentPropagator::new(model, n_ref1, n_ref2, state, settings)?.advance(state, t)
}

/// Expectations of the displaced-frame number observables at one time.
#[derive(Debug, Clone, Copy)]
pub struct FluctuationMoments {
    pub t: f64,
    /// `<N (x) I>` in the frame displaced by the Hartree orbitals.
    pub m10: f64,
    /// `<I (x) N>` in the displaced frame.
    pub m01: f64,
    /// `<N (x) N>` in the displaced frame.
    pub m11: f64,
}

/// Apply the displaced number observable
/// `N_species - sqrt(N_ref) (a*(f) + a(f)) + N_ref ||f||^2`
/// on one species, growing the cutoff by one so nothing is clipped.
fn displaced_number_apply(
    state: &TruncatedFockState,
    f: &OneBodyVector,
    n_ref: f64,
    species: Species,
) -> Result<TruncatedFockState> {
    let shift = n_ref * f.norm_squared();
    let mut out = state.scale_sectors(|n1, n2| {
        (match species {
            Species::One => n1,
            Species::Two => n2,
        }) as f64
            + shift
    });
    let up = state.apply_ladder(f, SmearKind::Create, species)?;
    let down = state.apply_ladder(f, SmearKind::Annihilate, species)?;
    let weight = Complex64::from(-n_ref.sqrt());
    out.add_assign(&up, weight)?;
    out.add_assign(&down, weight)?;
    Ok(out)
}

/// Compute the displaced-frame number moments of an evolved state against the
/// Hartree pair `(u_t, v_t)` with reference numbers `(n_ref1, n_ref2)`,
/// without constructing the displaced state itself. The state is renormalized
/// by its truncated norm.
pub fn fluctuation_moments(
    state: &TruncatedFockState,
    u_t: &OneBodyVector,
    v_t: &OneBodyVector,
    n_ref1: f64,
    n_ref2: f64,
) -> Result<FluctuationMoments> {
    for (name, orbital) in [("u", u_t), ("v", v_t)] {
        let norm = orbital.norm();
        if (norm - 1.0).abs() > 1e-6 {
            return Err(Error::Numerical(format!(
                "displaced-frame moments need a normalized {name} orbital, got norm {norm}"
            )));
        }
    }
    let total = state.total_norm_squared();
    if total <= 0.0 {
        return Err(Error::Numerical("moments of a zero-norm state".into()));
    }
    let a_psi = displaced_number_apply(state, u_t, n_ref1, Species::One)?;
    let b_psi = displaced_number_apply(state, v_t, n_ref2, Species::Two)?;
    let m10 = state.inner(&a_psi).re / total;
    let m01 = state.inner(&b_psi).re / total;
    // The two displaced observables act on different factors and commute, so
    // <A B> = <A psi, B psi> with both sides exact in the grown cutoffs.
    let m11 = a_psi.inner(&b_psi).re / total;
    Ok(FluctuationMoments {
        t: state.t,
        m10,
        m01,
        m11,
    })
}
