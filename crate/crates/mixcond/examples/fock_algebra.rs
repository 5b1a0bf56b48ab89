//! Tour of the occupation-basis machinery: sector sizes, ladder matrices and
//! their adjoint pairing, and numerical residuals of the canonical
//! commutation relations.

use mixcond::fock::{
    annihilation_matrix, check_ccr, creation_matrix, enumerate_sector_basis, sector_dimension,
    BasisRegistry, OneBodyVector,
};
use nalgebra::DVector;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> mixcond::Result<()> {
    let modes = 3;

    println!("sector dimensions over {modes} modes:");
    for n in 0..=6 {
        println!("  n = {n}: {}", sector_dimension(modes, n).unwrap());
    }

    let basis = enumerate_sector_basis(modes, 2)?;
    println!("\noccupation basis of the 2-particle sector (descending lexicographic):");
    for (i, occ) in basis.occupations().enumerate() {
        println!("  {i}: {occ:?}");
    }

    let registry = BasisRegistry::new(modes);
    let from = registry.get(1)?;
    let to = registry.get(2)?;
    let create = creation_matrix(0, &from, &to)?;
    let annihilate = annihilation_matrix(0, &to, &from)?;
    println!("\ncreation matrix for mode 0 (1 -> 2 particles):\n{create:.4}");
    println!(
        "adjoint pairing: creation == annihilation^T: {}",
        create == annihilate.transpose()
    );

    // Commutation relations on random smeared orbitals.
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let vol = 1.0;
    let mut random_orbital = |scale: f64| {
        let raw = DVector::from_fn(modes, |_, _| {
            Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)
        });
        let norm = (vol * raw.norm_squared()).sqrt();
        OneBodyVector::new(raw * Complex64::from(scale / norm), vol)
    };
    let f = random_orbital(1.0);
    let g = random_orbital(1.3);
    let mut rng2 = ChaCha8Rng::seed_from_u64(13);
    let residuals = check_ccr(&f, &g, 4, 10, &mut rng2)?;
    println!(
        "\nCCR residuals over 50 random states (sectors n <= 4):\n  \
         commutator: {:.3e}\n  annihilation pair: {:.3e}",
        residuals.commutator, residuals.annihilation_pair
    );
    Ok(())
}
