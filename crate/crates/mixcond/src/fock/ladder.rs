//! Creation/annihilation matrices between adjacent sectors, lattice-smeared
//! operators, and the canonical-commutation-relation check.
//!
//! Mode operators act on occupation states by
//! `b*_i |m> = sqrt(m_i + 1) |m + e_i>` and `b_i |m> = sqrt(m_i) |m - e_i>`.
//! Smeared operators carry the lattice weight: `a*(f) = sqrt(h^d) sum_i f_i b*_i`
//! and `a(f) = sqrt(h^d) sum_i conj(f_i) b_i`, so that `[a(f), a*(g)] = <f, g>`
//! with the lattice-weighted inner product.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};
use crate::fock::basis::{BasisRegistry, SectorBasis};
use crate::fock::state::OneBodyVector;

/// Sparse one-mode ladder action: each source basis index maps to at most one
/// target index with a real amplitude.
#[derive(Debug, Clone)]
pub(crate) struct LadderMap {
    pub targets: Vec<Option<(usize, f64)>>,
}

fn check_mode(mode: usize, basis: &SectorBasis) -> Result<()> {
    if mode >= basis.modes() {
        return Err(Error::Dimension(format!(
            "mode {mode} out of range for {} modes",
            basis.modes()
        )));
    }
    Ok(())
}

fn check_adjacent(from: &SectorBasis, to: &SectorBasis, delta: isize) -> Result<()> {
    if from.modes() != to.modes() {
        return Err(Error::Dimension(format!(
            "bases have different mode counts: {} vs {}",
            from.modes(),
            to.modes()
        )));
    }
    if to.particles() as isize != from.particles() as isize + delta {
        return Err(Error::Dimension(format!(
            "expected target sector with {} particles, got {}",
            from.particles() as isize + delta,
            to.particles()
        )));
    }
    Ok(())
}

pub(crate) fn creation_map(mode: usize, from: &SectorBasis, to: &SectorBasis) -> Result<LadderMap> {
    check_mode(mode, from)?;
    check_adjacent(from, to, 1)?;
    let mut targets = Vec::with_capacity(from.len());
    let mut occ = vec![0u8; from.modes()];
    for s in 0..from.len() {
        occ.copy_from_slice(from.occupation(s));
        let amp = ((occ[mode] + 1) as f64).sqrt();
        occ[mode] += 1;
        let t = to
            .index_of(&occ)
            .ok_or_else(|| Error::Numerical("occupation missing from target basis".into()))?;
        targets.push(Some((t, amp)));
    }
    Ok(LadderMap { targets })
}

pub(crate) fn annihilation_map(
    mode: usize,
    from: &SectorBasis,
    to: &SectorBasis,
) -> Result<LadderMap> {
    check_mode(mode, from)?;
    if from.particles() == 0 {
        return Err(Error::Dimension(
            "annihilation out of the vacuum sector is the zero map; handle n = 0 at the call site"
                .into(),
        ));
    }
    check_adjacent(from, to, -1)?;
    let mut targets = Vec::with_capacity(from.len());
    let mut occ = vec![0u8; from.modes()];
    for s in 0..from.len() {
        occ.copy_from_slice(from.occupation(s));
        if occ[mode] == 0 {
            targets.push(None);
            continue;
        }
        let amp = (occ[mode] as f64).sqrt();
        occ[mode] -= 1;
        let t = to
            .index_of(&occ)
            .ok_or_else(|| Error::Numerical("occupation missing from target basis".into()))?;
        targets.push(Some((t, amp)));
    }
    Ok(LadderMap { targets })
}

/// Dense matrix of `b*_mode` from sector `n` to sector `n + 1`.
pub fn creation_matrix(mode: usize, from: &SectorBasis, to: &SectorBasis) -> Result<DMatrix<f64>> {
    let map = creation_map(mode, from, to)?;
    let mut m = DMatrix::zeros(to.len(), from.len());
    for (s, entry) in map.targets.iter().enumerate() {
        if let Some((t, amp)) = entry {
            m[(*t, s)] = *amp;
        }
    }
    Ok(m)
}

/// Dense matrix of `b_mode` from sector `n` to sector `n - 1`.
pub fn annihilation_matrix(
    mode: usize,
    from: &SectorBasis,
    to: &SectorBasis,
) -> Result<DMatrix<f64>> {
    let map = annihilation_map(mode, from, to)?;
    let mut m = DMatrix::zeros(to.len(), from.len());
    for (s, entry) in map.targets.iter().enumerate() {
        if let Some((t, amp)) = entry {
            m[(*t, s)] = *amp;
        }
    }
    Ok(m)
}

/// Which smeared ladder operator to build.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SmearKind {
    Create,
    Annihilate,
}

/// Dense matrix of the lattice-smeared operator `a*(f)` (linear in `f`) or
/// `a(f)` (antilinear in `f`) between adjacent sectors.
pub fn smeared_operator(
    f: &OneBodyVector,
    kind: SmearKind,
    from: &SectorBasis,
    to: &SectorBasis,
) -> Result<DMatrix<Complex64>> {
    if f.len() != from.modes() {
        return Err(Error::Dimension(format!(
            "orbital has {} entries, basis has {} modes",
            f.len(),
            from.modes()
        )));
    }
    let phi = f.mode_amplitudes();
    let mut out = DMatrix::from_element(to.len(), from.len(), Complex64::new(0.0, 0.0));
    for mode in 0..from.modes() {
        let weight = match kind {
            SmearKind::Create => phi[mode],
            SmearKind::Annihilate => phi[mode].conj(),
        };
        if weight.norm_sqr() == 0.0 {
            continue;
        }
        let map = match kind {
            SmearKind::Create => creation_map(mode, from, to)?,
            SmearKind::Annihilate => annihilation_map(mode, from, to)?,
        };
        for (s, entry) in map.targets.iter().enumerate() {
            if let Some((t, amp)) = entry {
                out[(*t, s)] += weight * *amp;
            }
        }
    }
    Ok(out)
}

/// Apply a smeared ladder operator to a sector coefficient vector without
/// materializing the matrix.
pub(crate) fn apply_smeared(
    f: &OneBodyVector,
    kind: SmearKind,
    from: &SectorBasis,
    to: &SectorBasis,
    src: &DVector<Complex64>,
) -> Result<DVector<Complex64>> {
    let phi = f.mode_amplitudes();
    let mut out = DVector::from_element(to.len(), Complex64::new(0.0, 0.0));
    for mode in 0..from.modes() {
        let weight = match kind {
            SmearKind::Create => phi[mode],
            SmearKind::Annihilate => phi[mode].conj(),
        };
        if weight.norm_sqr() == 0.0 {
            continue;
        }
        let map = match kind {
            SmearKind::Create => creation_map(mode, from, to)?,
            SmearKind::Annihilate => annihilation_map(mode, from, to)?,
        };
        for (s, entry) in map.targets.iter().enumerate() {
            if let Some((t, amp)) = entry {
                out[*t] += src[s] * weight * *amp;
            }
        }
    }
    Ok(out)
}

/// Second quantization of a one-body operator on one sector:
/// `sum_ij T_ij b*_i b_j` as a dense matrix over the occupation basis.
pub fn one_body_operator(t: &DMatrix<f64>, basis: &SectorBasis) -> Result<DMatrix<f64>> {
    let m = basis.modes();
    if t.nrows() != m || t.ncols() != m {
        return Err(Error::Dimension(format!(
            "one-body matrix is {}x{}, basis has {m} modes",
            t.nrows(),
            t.ncols()
        )));
    }
    let dim = basis.len();
    let mut out = DMatrix::zeros(dim, dim);
    let mut occ = vec![0u8; m];
    for s in 0..dim {
        let src = basis.occupation(s);
        for j in 0..m {
            if src[j] == 0 {
                continue;
            }
            let mj = src[j] as f64;
            for i in 0..m {
                let tij = t[(i, j)];
                if tij == 0.0 {
                    continue;
                }
                if i == j {
                    out[(s, s)] += tij * mj;
                } else {
                    occ.copy_from_slice(src);
                    occ[j] -= 1;
                    occ[i] += 1;
                    let target = basis.index_of(&occ).expect("hop stays inside the sector");
                    let amp = (mj * (src[i] as f64 + 1.0)).sqrt();
                    out[(target, s)] += tij * amp;
                }
            }
        }
    }
    Ok(out)
}

/// Largest residuals of the canonical commutation relations over random states
/// in all sectors `n <= n_max` (the truncation edge itself is excluded by
/// keeping `n_max` strictly below any cutoff the caller cares about).
#[derive(Debug, Clone, Copy)]
pub struct CcrResiduals {
    /// `max || ([a(f), a*(g)] - <f,g>) psi ||`.
    pub commutator: f64,
    /// `max || [a(f), a(g)] psi ||`.
    pub annihilation_pair: f64,
}

/// Evaluate the CCR residuals for orbital pair `(f, g)` on `states_per_sector`
/// random states in each sector `n <= n_max`.
pub fn check_ccr(
    f: &OneBodyVector,
    g: &OneBodyVector,
    n_max: usize,
    states_per_sector: usize,
    rng: &mut impl Rng,
) -> Result<CcrResiduals> {
    if f.len() != g.len() {
        return Err(Error::Dimension(
            "orbitals must share the mode count".into(),
        ));
    }
    let modes = f.len();
    let registry = BasisRegistry::new(modes);
    let fg = f.inner(g);
    let mut residuals = CcrResiduals {
        commutator: 0.0,
        annihilation_pair: 0.0,
    };
    for n in 0..=n_max {
        let basis_n = registry.get(n)?;
        let basis_up = registry.get(n + 1)?;
        for _ in 0..states_per_sector {
            let psi = random_unit_vector(basis_n.len(), rng);

            // a(f) a*(g) psi - a*(g) a(f) psi - <f,g> psi
            let up = apply_smeared(g, SmearKind::Create, &basis_n, &basis_up, &psi)?;
            let down_up = apply_smeared(f, SmearKind::Annihilate, &basis_up, &basis_n, &up)?;
            let mut commutator = down_up - &psi * fg;
            if n >= 1 {
                let basis_down = registry.get(n - 1)?;
                let down = apply_smeared(f, SmearKind::Annihilate, &basis_n, &basis_down, &psi)?;
                let up_down = apply_smeared(g, SmearKind::Create, &basis_down, &basis_n, &down)?;
                commutator -= up_down;
            }
            residuals.commutator = residuals.commutator.max(commutator.norm());

            // [a(f), a(g)] psi, representable for n >= 2
            if n >= 2 {
                let basis_d1 = registry.get(n - 1)?;
                let basis_d2 = registry.get(n - 2)?;
                let gf = apply_smeared(g, SmearKind::Annihilate, &basis_n, &basis_d1, &psi)?;
                let fgf = apply_smeared(f, SmearKind::Annihilate, &basis_d1, &basis_d2, &gf)?;
                let ff = apply_smeared(f, SmearKind::Annihilate, &basis_n, &basis_d1, &psi)?;
                let gff = apply_smeared(g, SmearKind::Annihilate, &basis_d1, &basis_d2, &ff)?;
                residuals.annihilation_pair = residuals.annihilation_pair.max((fgf - gff).norm());
            }
        }
    }
    Ok(residuals)
}

pub(crate) fn random_unit_vector(dim: usize, rng: &mut impl Rng) -> DVector<Complex64> {
    let mut v = DVector::from_fn(dim, |_, _| {
        Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)
    });
    let norm = v.norm();
    if norm > 0.0 {
        v /= Complex64::from(norm);
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn bases(modes: usize, ns: &[usize]) -> Vec<SectorBasis> {
        ns.iter()
            .map(|&n| SectorBasis::new(modes, n).unwrap())
            .collect()
    }

    #[test]
    fn creation_from_vacuum() {
        let b = bases(3, &[0, 1]);
        let c = creation_matrix(1, &b[0], &b[1]).unwrap();
        assert_eq!(c.nrows(), 3);
        assert_eq!(c.ncols(), 1);
        let target = b[1].index_of(&[0, 1, 0]).unwrap();
        assert_abs_diff_eq!(c[(target, 0)], 1.0);
        assert_abs_diff_eq!(c.column(0).norm(), 1.0);
    }

    #[test]
    fn creation_amplitude_sqrt2() {
        let b = bases(2, &[1, 2]);
        let c = creation_matrix(0, &b[0], &b[1]).unwrap();
        let src = b[0].index_of(&[1, 0]).unwrap();
        let dst = b[1].index_of(&[2, 0]).unwrap();
        assert_abs_diff_eq!(c[(dst, src)], 2.0f64.sqrt());
    }

    #[test]
    fn annihilation_examples() {
        let b = bases(2, &[0, 1, 2]);
        let a = annihilation_matrix(0, &b[1], &b[0]).unwrap();
        let src = b[1].index_of(&[1, 0]).unwrap();
        assert_abs_diff_eq!(a[(0, src)], 1.0);

        let a = annihilation_matrix(0, &b[2], &b[1]).unwrap();
        let src = b[2].index_of(&[2, 0]).unwrap();
        let dst = b[1].index_of(&[1, 0]).unwrap();
        assert_abs_diff_eq!(a[(dst, src)], 2.0f64.sqrt());

        assert!(annihilation_matrix(0, &b[0], &b[0]).is_err());
    }

    #[test]
    fn adjoint_pair_and_number_recovery() {
        let b = bases(3, &[2, 3]);
        for mode in 0..3 {
            let c = creation_matrix(mode, &b[0], &b[1]).unwrap();
            let a = annihilation_matrix(mode, &b[1], &b[0]).unwrap();
            assert_eq!(c, a.transpose());

            // b*_i b_i is diagonal with the occupation number.
            let down = annihilation_matrix(mode, &b[0], &bases(3, &[1])[0]).unwrap();
            let up = creation_matrix(mode, &bases(3, &[1])[0], &b[0]).unwrap();
            let number = up * down;
            for (s, occ) in b[0].occupations().enumerate() {
                assert_abs_diff_eq!(number[(s, s)], occ[mode] as f64, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn smeared_reduces_to_mode_matrices_on_unit_vectors() {
        let b = bases(3, &[1, 2]);
        let mut values = DVector::from_element(3, Complex64::new(0.0, 0.0));
        values[1] = Complex64::new(1.0, 0.0);
        let f = OneBodyVector::new(values, 1.0);
        let smeared = smeared_operator(&f, SmearKind::Create, &b[0], &b[1]).unwrap();
        let plain = creation_matrix(1, &b[0], &b[1]).unwrap();
        for i in 0..smeared.nrows() {
            for j in 0..smeared.ncols() {
                assert_abs_diff_eq!(smeared[(i, j)].re, plain[(i, j)], epsilon = 1e-15);
                assert_abs_diff_eq!(smeared[(i, j)].im, 0.0);
            }
        }
    }

    #[test]
    fn annihilator_reads_out_the_orbital_overlap() {
        // a(f) on the one-particle state with wavefunction g gives <f, g> times the vacuum.
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let vol = 0.5;
        let f = OneBodyVector::new(
            DVector::from_fn(4, |_, _| {
                Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)
            }),
            vol,
        );
        let g = OneBodyVector::new(
            DVector::from_fn(4, |_, _| {
                Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)
            }),
            vol,
        );
        let b = bases(4, &[0, 1]);
        // one-particle state with wavefunction g: coefficients are the mode amplitudes
        let one_particle = {
            let phi = g.mode_amplitudes();
            DVector::from_fn(b[1].len(), |idx, _| {
                let occ = b[1].occupation(idx);
                let mode = occ.iter().position(|&x| x == 1).unwrap();
                phi[mode]
            })
        };
        let out = apply_smeared(&f, SmearKind::Annihilate, &b[1], &b[0], &one_particle).unwrap();
        let expected = f.inner(&g);
        assert!((out[0] - expected).norm() < 1e-14);
    }

    #[test]
    fn ccr_residuals_are_roundoff_below_cutoff() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let e0 = OneBodyVector::basis_vector(3, 0, 1.0);
        let res = check_ccr(&e0, &e0, 3, 10, &mut rng).unwrap();
        assert!(
            res.commutator <= 1e-12,
            "commutator residual {}",
            res.commutator
        );
        assert!(res.annihilation_pair <= 1e-12);

        // Orthogonal pair: the commutator must vanish against <f,g> = 0.
        let e1 = OneBodyVector::basis_vector(3, 1, 1.0);
        let res = check_ccr(&e0, &e1, 3, 10, &mut rng).unwrap();
        assert!(res.commutator <= 1e-12);

        // Random orbitals on a weighted lattice.
        let vol = 0.7;
        for _ in 0..5 {
            let f = OneBodyVector::new(
                DVector::from_fn(3, |_, _| {
                    Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)
                }),
                vol,
            );
            let g = OneBodyVector::new(
                DVector::from_fn(3, |_, _| {
                    Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)
                }),
                vol,
            );
            let res = check_ccr(&f, &g, 3, 10, &mut rng).unwrap();
            assert!(res.commutator <= 1e-10);
            assert!(res.annihilation_pair <= 1e-10);
        }
    }

    #[test]
    fn one_body_operator_counts_and_hops() {
        // Diagonal T gives the weighted number operator.
        let basis = SectorBasis::new(3, 2).unwrap();
        let t = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 2.0, 3.0]));
        let op = one_body_operator(&t, &basis).unwrap();
        for (s, occ) in basis.occupations().enumerate() {
            let expected: f64 = occ
                .iter()
                .zip([1.0, 2.0, 3.0])
                .map(|(&m, w)| m as f64 * w)
                .sum();
            assert_abs_diff_eq!(op[(s, s)], expected, epsilon = 1e-14);
        }

        // A single hop matches the ladder product.
        let mut t = DMatrix::zeros(3, 3);
        t[(0, 1)] = 1.0;
        let op = one_body_operator(&t, &basis).unwrap();
        let b1 = SectorBasis::new(3, 1).unwrap();
        let down = annihilation_matrix(1, &basis, &b1).unwrap();
        let up = creation_matrix(0, &b1, &basis).unwrap();
        let expected = up * down;
        assert!((op - expected).norm() < 1e-14);
    }
}
