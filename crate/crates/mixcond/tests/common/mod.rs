//! Shared brute-force oracles for the integration suites, written against the
//! first-quantized tensor representation and kept independent of the
//! second-quantized code paths they cross-check.
//!
//! Each test target compiles this module separately and uses a subset of it.
#![allow(dead_code)]

use mixcond::fock::{SectorBasis, SectorState};
use mixcond::model::LatticeModel;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// Decode a flat index over `M^n` into particle positions.
pub fn decode(mut index: usize, modes: usize, particles: usize) -> Vec<usize> {
    let mut out = vec![0usize; particles];
    for slot in (0..particles).rev() {
        out[slot] = index % modes;
        index /= modes;
    }
    out
}

fn occupation_of(positions: &[usize], modes: usize) -> Vec<u8> {
    let mut occ = vec![0u8; modes];
    for &p in positions {
        occ[p] += 1;
    }
    occ
}

/// The normalized symmetric tensor of one occupation basis state over `M^n`:
/// `sqrt(prod m_i! / n!)` on every tuple whose occupation matches, else zero.
pub fn occupation_tensor(basis: &SectorBasis, index: usize) -> DVector<f64> {
    let modes = basis.modes();
    let n = basis.particles();
    let target = basis.occupation(index);
    let full_dim = modes.pow(n as u32);
    let weight: f64 = {
        let denom: f64 = target.iter().map(|&m| factorial(m as usize)).product();
        (denom / factorial(n)).sqrt()
    };
    DVector::from_fn(full_dim, |f, _| {
        if occupation_of(&decode(f, modes, n), modes) == target {
            weight
        } else {
            0.0
        }
    })
}

/// First-quantized mean-field Hamiltonian on the full (unsymmetrized) tensor
/// space `M^{n1} (x) M^{n2}`: one Laplacian per particle slot plus the pair
/// sums `1/N1 sum_{p<q} V1`, `1/N2 sum_{p<q} V2`, `1/(N1+N2) sum sum V12`,
/// evaluated pointwise at the particle positions.
pub fn first_quantized_hamiltonian(
    model: &LatticeModel,
    n_ref1: f64,
    n_ref2: f64,
    n1: usize,
    n2: usize,
) -> DMatrix<f64> {
    let m = model.total_sites;
    let dim1 = m.pow(n1 as u32);
    let dim2 = m.pow(n2 as u32);
    let dim = dim1 * dim2;
    let mut h = DMatrix::<f64>::zeros(dim, dim);

    // Kinetic terms: the Laplacian acting on each slot in turn.
    for row in 0..dim {
        let xs = decode(row / dim2, m, n1);
        let ys = decode(row % dim2, m, n2);
        for (slot, &x) in xs.iter().enumerate() {
            for x2 in 0..m {
                let lap = model.laplacian[(x2, x)];
                if lap == 0.0 {
                    continue;
                }
                let mut xs2 = xs.clone();
                xs2[slot] = x2;
                let col = encode(&xs2, m) * dim2 + encode(&ys, m);
                h[(col, row)] += lap;
            }
        }
        for (slot, &y) in ys.iter().enumerate() {
            for y2 in 0..m {
                let lap = model.laplacian[(y2, y)];
                if lap == 0.0 {
                    continue;
                }
                let mut ys2 = ys.clone();
                ys2[slot] = y2;
                let col = encode(&xs, m) * dim2 + encode(&ys2, m);
                h[(col, row)] += lap;
            }
        }
        // Potential terms are diagonal in the position representation.
        let mut pot = 0.0;
        for p in 0..n1 {
            for q in (p + 1)..n1 {
                pot += model.v1[(xs[p], xs[q])] / n_ref1;
            }
        }
        for p in 0..n2 {
            for q in (p + 1)..n2 {
                pot += model.v2[(ys[p], ys[q])] / n_ref2;
            }
        }
        for &x in &xs {
            for &y in &ys {
                pot += model.v12[(x, y)] / (n_ref1 + n_ref2);
            }
        }
        h[(row, row)] += pot;
    }
    h
}

fn encode(positions: &[usize], modes: usize) -> usize {
    positions.iter().fold(0, |acc, &p| acc * modes + p)
}

/// Embed a sector state into the full tensor space.
pub fn embed_sector_state(state: &SectorState) -> DVector<Complex64> {
    let m = state.basis1.modes();
    let (n1, n2) = (state.n1(), state.n2());
    let dim2 = m.pow(n2 as u32);
    let full = m.pow((n1 + n2) as u32);
    let tensors1: Vec<DVector<f64>> = (0..state.basis1.len())
        .map(|a| occupation_tensor(&state.basis1, a))
        .collect();
    let tensors2: Vec<DVector<f64>> = (0..state.basis2.len())
        .map(|b| occupation_tensor(&state.basis2, b))
        .collect();
    let mut out = DVector::from_element(full, Complex64::new(0.0, 0.0));
    for a in 0..state.basis1.len() {
        for b in 0..state.basis2.len() {
            let c = state.coeffs[(a, b)];
            if c.norm_sqr() == 0.0 {
                continue;
            }
            for (f1, w1) in tensors1[a].iter().enumerate() {
                if *w1 == 0.0 {
                    continue;
                }
                for (f2, w2) in tensors2[b].iter().enumerate() {
                    if *w2 == 0.0 {
                        continue;
                    }
                    out[f1 * dim2 + f2] += c * (*w1 * *w2);
                }
            }
        }
    }
    out
}

/// The dense sector Hamiltonian obtained the long way: embed every product of
/// occupation tensors and sandwich the first-quantized operator.
pub fn sector_hamiltonian_by_embedding(
    model: &LatticeModel,
    n_ref1: f64,
    n_ref2: f64,
    basis1: &SectorBasis,
    basis2: &SectorBasis,
) -> DMatrix<f64> {
    let (n1, n2) = (basis1.particles(), basis2.particles());
    let m = model.total_sites;
    let dim2_full = m.pow(n2 as u32);
    let h_full = first_quantized_hamiltonian(model, n_ref1, n_ref2, n1, n2);
    let (d1, d2) = (basis1.len(), basis2.len());
    // Embedding columns indexed by p = b * d1 + a, matching the library's
    // flat product ordering.
    let full = m.pow((n1 + n2) as u32);
    let mut embed = DMatrix::<f64>::zeros(full, d1 * d2);
    for b in 0..d2 {
        let t2 = occupation_tensor(basis2, b);
        for a in 0..d1 {
            let t1 = occupation_tensor(basis1, a);
            let p = b * d1 + a;
            for (f1, w1) in t1.iter().enumerate() {
                if *w1 == 0.0 {
                    continue;
                }
                for (f2, w2) in t2.iter().enumerate() {
                    if *w2 != 0.0 {
                        embed[(f1 * dim2_full + f2, p)] = w1 * w2;
                    }
                }
            }
        }
    }
    embed.transpose() * h_full * &embed
}

/// Brute-force `(1,1)` reduction: embed the state, form the full density
/// matrix implicitly, and contract all but the first variable of each species.
pub fn brute_force_reduced_density(state: &SectorState) -> DMatrix<Complex64> {
    let m = state.basis1.modes();
    let (n1, n2) = (state.n1(), state.n2());
    let psi = embed_sector_state(state);
    let dim2 = m.pow(n2 as u32);
    let rest1 = m.pow((n1 - 1) as u32);
    let rest2 = m.pow((n2 - 1) as u32);
    let full_index = |x: usize, r1: usize, y: usize, r2: usize| -> usize {
        // x occupies the first species-1 slot, y the first species-2 slot
        ((x * rest1 + r1) * m + y) * rest2 + r2
    };
    debug_assert_eq!(m.pow(n1 as u32) * dim2, psi.len());
    let mut gamma = DMatrix::from_element(m * m, m * m, Complex64::new(0.0, 0.0));
    for x in 0..m {
        for y in 0..m {
            for xp in 0..m {
                for yp in 0..m {
                    let mut acc = Complex64::new(0.0, 0.0);
                    for r1 in 0..rest1 {
                        for r2 in 0..rest2 {
                            acc += psi[full_index(x, r1, y, r2)]
                                * psi[full_index(xp, r1, yp, r2)].conj();
                        }
                    }
                    gamma[(x * m + y, xp * m + yp)] = acc;
                }
            }
        }
    }
    gamma
}
