//! Truncated two-species coherent states: Poisson sector statistics, the
//! truncation deficit against its closed form, and number expectations.

use mixcond::fock::{
    coherent_state, number_expectation, poisson_pmf, BasisRegistry, NumberObservable, OneBodyVector,
};
use nalgebra::DVector;
use num_complex::Complex64;

fn main() -> mixcond::Result<()> {
    let modes = 2;
    let registry = BasisRegistry::new(modes);
    let vol = 1.0;

    // Two normalized orbitals scaled to intensities |f|^2 = 2 and |g|^2 = 1.
    let u = OneBodyVector::new(
        DVector::from_vec(vec![Complex64::new(0.8, 0.0), Complex64::new(0.0, 0.6)]),
        vol,
    );
    let v = OneBodyVector::new(
        DVector::from_vec(vec![Complex64::new(0.6, 0.0), Complex64::new(0.8, 0.0)]),
        vol,
    );
    let (intensity1, intensity2): (f64, f64) = (2.0, 1.0);
    let (cutoff1, cutoff2) = (14, 12);
    let state = coherent_state(
        &u.scale(intensity1.sqrt()),
        &v.scale(intensity2.sqrt()),
        cutoff1,
        cutoff2,
        1e-6,
        &registry,
    )?;

    println!("species-1 sector masses vs Poisson({intensity1}):");
    let pmf = poisson_pmf(intensity1, cutoff1);
    for n in 0..=6 {
        let mass: f64 = state
            .sectors()
            .filter(|(&(n1, _), _)| n1 == n)
            .map(|(_, c)| c.norm_squared())
            .sum();
        println!("  n = {n}: measured {:.10}  analytic {:.10}", mass, pmf[n]);
    }

    let tail1: f64 = poisson_pmf(intensity1, cutoff1).iter().sum();
    let tail2: f64 = poisson_pmf(intensity2, cutoff2).iter().sum();
    println!(
        "\ntruncation deficit: measured {:.3e}, closed form {:.3e}, flagged: {}",
        state.deficit(),
        1.0 - tail1 * tail2,
        state.deficit_flag
    );

    println!("\nnumber expectations over the renormalized truncated state:");
    for (label, which, ideal) in [
        ("<N (x) I>", NumberObservable::Species1, intensity1),
        ("<I (x) N>", NumberObservable::Species2, intensity2),
        (
            "<N (x) N>",
            NumberObservable::Product,
            intensity1 * intensity2,
        ),
    ] {
        let value = number_expectation(&state, which)?;
        println!("  {label} = {value:.10}  (untruncated value {ideal})");
    }
    Ok(())
}
