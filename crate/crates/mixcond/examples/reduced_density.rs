//! Follow the reduced density of an interacting coherent-state evolution:
//! trace distance to the Hartree projector, the displaced-frame moments, and
//! the nine-term bound that dominates the distance.

use mixcond::dynamics::{fluctuation_moments, CoherentPropagator};
use mixcond::fock::{coherent_state, BasisRegistry, OneBodyVector};
use mixcond::harness::truncation_slack;
use mixcond::hartree::{initial_orbital, HartreeSolver, HartreeState};
use mixcond::model::{
    CouplingConstants, LatticeModel, OrbitalShape, PotentialSpec, PropagatorSettings,
};
use mixcond::reduced::{
    hartree_projector, part1_bound_terms, reduced_density_fock, trace_distance,
};

fn main() -> mixcond::Result<()> {
    let g = PotentialSpec::gaussian(1.0, 1.0);
    let model = LatticeModel::new(1, 2, 1.0, &g, &g, &g)?;
    let couplings = CouplingConstants::symmetric();
    let vol = model.volume_element();
    let registry = BasisRegistry::new(model.total_sites);
    let settings = PropagatorSettings::default();

    let intensity: f64 = 2.0;
    let (cutoff1, cutoff2) = (14, 14);

    let u0 = initial_orbital(
        &OrbitalShape::GaussianBump {
            center: 0,
            width: 1.0,
        },
        &model,
    )?;
    let v0 = initial_orbital(&OrbitalShape::Uniform, &model)?;
    let hartree0 = HartreeState::normalized(u0, v0, vol)?;
    let solver = HartreeSolver::new(&model, couplings);
    let trajectory = solver.evolve(&hartree0, 1.0, 1e-3, 125)?;

    let f = OneBodyVector::new(hartree0.u.clone(), vol).scale(intensity.sqrt());
    let gvec = OneBodyVector::new(hartree0.v.clone(), vol).scale(intensity.sqrt());
    let state0 = coherent_state(&f, &gvec, cutoff1, cutoff2, 1e-6, &registry)?;
    println!(
        "coherent state at intensity {intensity}: deficit {:.2e} over cutoffs ({cutoff1}, {cutoff2})",
        state0.deficit()
    );

    let propagator = CoherentPropagator::new(&model, intensity, intensity, &state0, &settings)?;
    let mut state = state0;
    let mut t_prev = 0.0;
    println!("\n   t    distance      p_sum      m10       m01       m11");
    for sample in &trajectory.samples {
        let t = sample.state.t;
        if t > t_prev {
            state = propagator.advance(&state, t - t_prev)?;
            t_prev = t;
        }
        let u_t = OneBodyVector::new(sample.state.u.clone(), vol);
        let v_t = OneBodyVector::new(sample.state.v.clone(), vol);
        let gamma = reduced_density_fock(&state)?;
        let projector = hartree_projector(&u_t, &v_t)?;
        let distance = trace_distance(&gamma, &projector)?;
        let moments = fluctuation_moments(&state, &u_t, &v_t, intensity, intensity)?;
        let bound = part1_bound_terms(&moments, intensity, intensity, distance)?;
        println!(
            "{t:5.2}  {distance:.4e}  {:.4e}  {:.2e}  {:.2e}  {:.2e}",
            bound.sum, moments.m10, moments.m01, moments.m11
        );
        if t == 1.0 {
            let eps = truncation_slack(state.deficit(), cutoff1, cutoff2);
            println!("\nbound terms at t = 1 (distance {distance:.4e} <= sum + slack {eps:.1e}):");
            for (k, p) in bound.p.iter().enumerate() {
                println!("  p{} = {p:.6e}", k + 1);
            }
        }
    }
    Ok(())
}
