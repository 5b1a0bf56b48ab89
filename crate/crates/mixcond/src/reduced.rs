//! The `(1,1)`-reduced density operator, the Hartree projector, the
//! trace-norm distance between them, and the nine bound terms that control it.
//!
//! The reduced density is assembled in second-quantized form: its kernel is
//! `<psi, b*_{x'} c*_{y'} b_x c_y psi>` divided by the measured `<N (x) N>`,
//! so the trace is exactly one under truncation. Matrices are expressed over
//! the discrete mode basis (the isometric image of the lattice-weighted
//! one-body space), indexed by site pairs `(x, y) -> x * M + y`.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::dynamics::FluctuationMoments;
use crate::error::{Error, Result};
use crate::fock::ladder::{annihilation_map, LadderMap};
use crate::fock::state::{OneBodyVector, SectorState, TruncatedFockState};

/// Hermitian trace-one operator on the one-body (x) one-body space.
#[derive(Debug, Clone)]
pub struct ReducedDensity {
    /// `(M^2) x (M^2)` matrix, row/column index `x * M + y`.
    pub matrix: DMatrix<Complex64>,
    pub modes: usize,
    /// The `<N (x) N>` expectation (per unit state norm) used as divisor;
    /// `1.0` for directly constructed projectors.
    pub normalization: f64,
}

impl ReducedDensity {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.dim()).map(|k| self.matrix[(k, k)]).sum()
    }

    pub fn hermiticity_defect(&self) -> f64 {
        let adj = self.matrix.adjoint();
        max_entry_norm(&(&self.matrix - adj))
    }

    /// Eigenvalues of the (Hermitian) matrix, ascending.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut vals: Vec<f64> = self
            .matrix
            .clone()
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .copied()
            .collect();
        vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
        vals
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues().first().copied().unwrap_or(0.0)
    }
}

/// Largest entry magnitude of a complex matrix.
pub(crate) fn max_entry_norm(m: &DMatrix<Complex64>) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Annihilation of one mode on the species-1 (row) index of a coefficient grid.
fn annihilate_rows(
    map: &LadderMap,
    x: &DMatrix<Complex64>,
    target_rows: usize,
) -> DMatrix<Complex64> {
    let mut out = DMatrix::from_element(target_rows, x.ncols(), Complex64::new(0.0, 0.0));
    for (src, entry) in map.targets.iter().enumerate() {
        if let Some((dst, amp)) = entry {
            for col in 0..x.ncols() {
                out[(*dst, col)] += x[(src, col)] * *amp;
            }
        }
    }
    out
}

/// Annihilation of one mode on the species-2 (column) index.
fn annihilate_cols(
    map: &LadderMap,
    x: &DMatrix<Complex64>,
    target_cols: usize,
) -> DMatrix<Complex64> {
    let mut out = DMatrix::from_element(x.nrows(), target_cols, Complex64::new(0.0, 0.0));
    for (src, entry) in map.targets.iter().enumerate() {
        if let Some((dst, amp)) = entry {
            for row in 0..x.nrows() {
                out[(row, *dst)] += x[(row, src)] * *amp;
            }
        }
    }
    out
}

/// Accumulate the Gram matrix of `(b_x c_y) psi` over mode pairs for one
/// sector block; returns the raw (unnormalized) kernel contribution.
fn sector_gram(
    state_coeffs: &DMatrix<Complex64>,
    basis1: &crate::fock::SectorBasis,
    basis2: &crate::fock::SectorBasis,
    registry: &std::sync::Arc<crate::fock::BasisRegistry>,
) -> Result<DMatrix<Complex64>> {
    let m = basis1.modes();
    let down1 = registry.get(basis1.particles() - 1)?;
    let down2 = registry.get(basis2.particles() - 1)?;
    let maps1: Vec<LadderMap> = (0..m)
        .map(|mode| annihilation_map(mode, basis1, &down1))
        .collect::<Result<_>>()?;
    let maps2: Vec<LadderMap> = (0..m)
        .map(|mode| annihilation_map(mode, basis2, &down2))
        .collect::<Result<_>>()?;
    // w[x * M + y] = (b_x c_y) psi over the lowered product basis
    let mut lowered: Vec<DMatrix<Complex64>> = Vec::with_capacity(m * m);
    for x in 0..m {
        let rows_done = annihilate_rows(&maps1[x], state_coeffs, down1.len());
        for y in 0..m {
            lowered.push(annihilate_cols(&maps2[y], &rows_done, down2.len()));
        }
    }
    let mut gram = DMatrix::from_element(m * m, m * m, Complex64::new(0.0, 0.0));
    for a in 0..m * m {
        for b in a..m * m {
            // kernel(row a, col b) = <(bc)_b psi, (bc)_a psi>
            let value = lowered[b].dotc(&lowered[a]);
            gram[(a, b)] = value;
            if a != b {
                gram[(b, a)] = value.conj();
            }
        }
    }
    Ok(gram)
}

/// Reduced density of a normalized fixed-sector state with `n1, n2 >= 1`.
pub fn reduced_density_sector(state: &SectorState) -> Result<ReducedDensity> {
    if state.n1() == 0 || state.n2() == 0 {
        return Err(Error::Config(format!(
            "reduced density needs at least one particle of each species, sector is ({}, {})",
            state.n1(),
            state.n2()
        )));
    }
    let norm = state.norm();
    if (norm - 1.0).abs() > 1e-8 {
        return Err(Error::Numerical(format!(
            "reduced density expects a normalized sector state, got norm {norm}"
        )));
    }
    let registry = crate::fock::BasisRegistry::new(state.basis1.modes());
    let gram = sector_gram(&state.coeffs, &state.basis1, &state.basis2, &registry)?;
    finish_density(gram, state.basis1.modes(), norm * norm)
}

/// Reduced density of a truncated Fock state, normalized by the measured
/// `<N (x) N>` so the trace is exactly one.
pub fn reduced_density_fock(state: &TruncatedFockState) -> Result<ReducedDensity> {
    let m = state.modes();
    let registry = state.registry().clone();
    let mut gram = DMatrix::from_element(m * m, m * m, Complex64::new(0.0, 0.0));
    for (&(n1, n2), coeffs) in state.sectors() {
        if n1 == 0 || n2 == 0 {
            continue; // annihilated by b_x c_y; contributes nothing
        }
        let basis1 = registry.get(n1)?;
        let basis2 = registry.get(n2)?;
        gram += sector_gram(coeffs, &basis1, &basis2, &registry)?;
    }
    finish_density(gram, m, state.total_norm_squared())
}

fn finish_density(
    gram: DMatrix<Complex64>,
    modes: usize,
    norm_squared: f64,
) -> Result<ReducedDensity> {
    let raw_trace: f64 = (0..gram.nrows()).map(|k| gram[(k, k)].re).sum();
    if raw_trace <= 0.0 {
        return Err(Error::Numerical(
            "reduced density undefined: the state has no component with both species occupied"
                .into(),
        ));
    }
    Ok(ReducedDensity {
        matrix: gram / Complex64::from(raw_trace),
        modes,
        normalization: raw_trace / norm_squared,
    })
}

/// The rank-one projector onto `u (x) v` for normalized orbitals.
pub fn hartree_projector(u: &OneBodyVector, v: &OneBodyVector) -> Result<ReducedDensity> {
    for (name, orbital) in [("u", u), ("v", v)] {
        let norm = orbital.norm();
        if (norm - 1.0).abs() > 1e-8 {
            return Err(Error::Config(format!(
                "projector needs a normalized {name} orbital, got norm {norm}"
            )));
        }
    }
    if u.len() != v.len() {
        return Err(Error::Dimension(
            "orbitals must share the mode count".into(),
        ));
    }
    let m = u.len();
    let phi_u = u.mode_amplitudes();
    let phi_v = v.mode_amplitudes();
    let pair = |x: usize, y: usize| phi_u[x] * phi_v[y];
    let matrix = DMatrix::from_fn(m * m, m * m, |row, col| {
        let (x, y) = (row / m, row % m);
        let (xp, yp) = (col / m, col % m);
        pair(x, y) * pair(xp, yp).conj()
    });
    Ok(ReducedDensity {
        matrix,
        modes: m,
        normalization: 1.0,
    })
}

/// Trace-norm distance `sum_k |lambda_k(A - B)|` of two Hermitian operators.
pub fn trace_distance(a: &ReducedDensity, b: &ReducedDensity) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::Dimension(format!(
            "operators have different dimensions: {} vs {}",
            a.dim(),
            b.dim()
        )));
    }
    for (name, op) in [("left", a), ("right", b)] {
        let defect = op.hermiticity_defect();
        if defect > 1e-8 {
            return Err(Error::Numerical(format!(
                "{name} operand is not Hermitian (defect {defect:.3e})"
            )));
        }
    }
    let diff = &a.matrix - &b.matrix;
    let eig = diff.clone().symmetric_eigen();
    // Sanity-check the spectrum against the first two moments of the matrix;
    // a failed check means the eigensolver mishandled this input, in which
    // case the singular values (equal to |lambda| for Hermitian operators)
    // give the same sum through an independent factorization.
    let trace: f64 = (0..diff.nrows()).map(|k| diff[(k, k)].re).sum();
    let frobenius = diff.norm_squared();
    let val_sum: f64 = eig.eigenvalues.iter().sum();
    let val_sq: f64 = eig.eigenvalues.iter().map(|l| l * l).sum();
    if (val_sum - trace).abs() > 1e-8 * (1.0 + frobenius.sqrt())
        || (val_sq - frobenius).abs() > 1e-8 * (1.0 + frobenius)
    {
        return Ok(diff.svd(false, false).singular_values.iter().sum());
    }
    Ok(eig.eigenvalues.iter().map(|l| l.abs()).sum())
}

/// The nine bound terms assembled from displaced-frame moments and reference
/// particle numbers, together with the measured distance they dominate.
#[derive(Debug, Clone)]
pub struct BoundBreakdown {
    pub t: f64,
    /// Terms `p1..p9` in order.
    pub p: [f64; 9],
    pub sum: f64,
    pub measured_distance: f64,
}

/// Evaluate the nine bound terms from the moments at reference numbers
/// `(n1, n2)`. `measured_distance` is carried along for reporting.
pub fn part1_bound_terms(
    moments: &FluctuationMoments,
    n1: f64,
    n2: f64,
    measured_distance: f64,
) -> Result<BoundBreakdown> {
    if !(n1 > 0.0 && n2 > 0.0) {
        return Err(Error::Config(format!(
            "reference numbers must be positive, got ({n1}, {n2})"
        )));
    }
    let clamp = |m: f64, name: &str| -> Result<f64> {
        if m < -1e-9 {
            return Err(Error::Numerical(format!("negative moment {name} = {m}")));
        }
        Ok(m.max(0.0))
    };
    let m10 = clamp(moments.m10, "m10")?;
    let m01 = clamp(moments.m01, "m01")?;
    let m11 = clamp(moments.m11, "m11")?;
    let p = [
        2.0 * m10.sqrt() / n1.sqrt(),
        2.0 * m01.sqrt() / n2.sqrt(),
        2.0 * m11.sqrt() / (n1 * n2).sqrt(),
        2.0 * (m10 * m01).sqrt() / (n1 * n2).sqrt(),
        m10 / n1,
        m01 / n2,
        2.0 * (m11 * m10).sqrt() / (n1 * n2.sqrt()),
        2.0 * (m11 * m01).sqrt() / (n1.sqrt() * n2),
        m11 / (n1 * n2),
    ];
    Ok(BoundBreakdown {
        t: moments.t,
        p,
        sum: p.iter().sum(),
        measured_distance,
    })
}
