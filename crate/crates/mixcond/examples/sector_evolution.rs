//! Assemble the mean-field Hamiltonian on one fixed-number sector and
//! propagate a product state, comparing the dense-eigendecomposition and
//! Krylov paths and watching energy conservation.

use mixcond::dynamics::{assemble_sector_hamiltonian, propagate_sector};
use mixcond::fock::{BasisRegistry, OneBodyVector, SectorState};
use mixcond::hartree::initial_orbital;
use mixcond::model::{
    LatticeModel, OrbitalShape, PotentialSpec, PropagationMethod, PropagatorSettings,
};

fn main() -> mixcond::Result<()> {
    let g = PotentialSpec::gaussian(1.0, 1.0);
    let model = LatticeModel::new(1, 4, 1.0, &g, &g, &g)?;
    let registry = BasisRegistry::new(model.total_sites);
    let vol = model.volume_element();

    let (n1, n2) = (4usize, 3usize);
    let u = OneBodyVector::new(
        initial_orbital(
            &OrbitalShape::GaussianBump {
                center: 0,
                width: 1.0,
            },
            &model,
        )?,
        vol,
    );
    let v = OneBodyVector::new(
        initial_orbital(
            &OrbitalShape::GaussianBump {
                center: 2,
                width: 1.5,
            },
            &model,
        )?,
        vol,
    );
    let state = SectorState::product_state(&u, &v, n1, n2, &registry)?;

    let hamiltonian = assemble_sector_hamiltonian(
        &model,
        n1 as f64,
        n2 as f64,
        n1,
        n2,
        &registry,
        &PropagatorSettings::default(),
    )?;
    println!(
        "sector ({n1}, {n2}) over {} modes: dimension {} ({} x {})",
        model.total_sites,
        hamiltonian.dim(),
        hamiltonian.dims().0,
        hamiltonian.dims().1
    );
    let e0 = hamiltonian.expectation(&state.coeffs);
    println!("initial energy expectation: {e0:.8}");

    let dense = PropagatorSettings {
        method: PropagationMethod::DenseEig,
        ..Default::default()
    };
    let krylov = PropagatorSettings {
        method: PropagationMethod::Krylov,
        ..Default::default()
    };

    println!("\n   t      |<H>(t) - <H>(0)|   ||psi| - 1|   dense-vs-krylov");
    for &t in &[0.25, 0.5, 1.0, 2.0] {
        let a = propagate_sector(&state, &hamiltonian, t, &dense)?;
        let b = propagate_sector(&state, &hamiltonian, t, &krylov)?;
        let energy_drift = (hamiltonian.expectation(&a.coeffs) - e0).abs();
        let norm_drift = (a.norm() - 1.0).abs();
        let method_gap = (&a.coeffs - &b.coeffs).norm();
        println!("{t:5.2}   {energy_drift:.3e}           {norm_drift:.3e}     {method_gap:.3e}");
    }
    Ok(())
}
