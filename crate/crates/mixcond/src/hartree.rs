//! Integrator for the coupled Hartree system of the two condensate orbitals.
//!
//! The pair `(u, v)` obeys
//!
//! ```text
//! i du/dt = -Lap u + (V1 * |u|^2) u + c2 (V12 * |v|^2) u
//! i dv/dt = -Lap v + (V2 * |v|^2) v + c1 (V12 * |u|^2) v
//! ```
//!
//! with lattice convolutions `(V * rho)_i = h^d sum_j V(i,j) rho_j`. Time
//! stepping is Strang splitting: a half step of the (diagonal) nonlinear
//! potential phase, an exact kinetic exponential in the plane-wave eigenbasis
//! of the periodic stencil, and a second half step with densities recomputed
//! after the kinetic stage. Each stage is unitary, so the per-species mass is
//! conserved to roundoff; orbitals are never renormalized, and drift is
//! monitored instead.

use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::{CouplingConstants, LatticeModel, OrbitalShape};

/// One-body orbital pair at a fixed time, with the lattice volume element it
/// is normalized against (`h^d * ||u||^2 = 1`).
#[derive(Debug, Clone)]
pub struct HartreeState {
    pub u: DVector<Complex64>,
    pub v: DVector<Complex64>,
    pub t: f64,
    /// Lattice volume element `h^d` defining the weighted norm.
    pub vol: f64,
}

impl HartreeState {
    /// Build a state at `t = 0`, rescaling both orbitals to unit lattice-weighted norm.
    pub fn normalized(u: DVector<Complex64>, v: DVector<Complex64>, vol: f64) -> Result<Self> {
        if u.len() != v.len() {
            return Err(Error::Dimension(format!(
                "orbital lengths differ: {} vs {}",
                u.len(),
                v.len()
            )));
        }
        let nu = (vol * u.norm_squared()).sqrt();
        let nv = (vol * v.norm_squared()).sqrt();
        if nu == 0.0 || nv == 0.0 || !nu.is_finite() || !nv.is_finite() {
            return Err(Error::Numerical(
                "cannot normalize a zero or non-finite orbital".into(),
            ));
        }
        Ok(HartreeState {
            u: u / Complex64::from(nu),
            v: v / Complex64::from(nv),
            t: 0.0,
            vol,
        })
    }

    /// Lattice-weighted squared norms `(h^d ||u||^2, h^d ||v||^2)`.
    pub fn mass(&self) -> (f64, f64) {
        (
            self.vol * self.u.norm_squared(),
            self.vol * self.v.norm_squared(),
        )
    }

    pub fn is_finite(&self) -> bool {
        self.u
            .iter()
            .chain(self.v.iter())
            .all(|z| z.re.is_finite() && z.im.is_finite())
    }
}

/// Lattice-weighted squared norms of the two orbitals.
pub fn mass(state: &HartreeState) -> (f64, f64) {
    state.mass()
}

/// Exact one-body kinetic propagator `exp(i Lap t)`, diagonalized in the
/// plane-wave basis of the periodic stencil. The stencil is circulant along
/// each axis, so the Fourier modes are exact eigenvectors with eigenvalues
/// `sum_a (2 - 2 cos(2 pi k_a / L)) / h^2`; no numerical eigensolver is
/// involved.
#[derive(Debug, Clone)]
pub struct KineticPropagator {
    eigenvalues: DVector<f64>,
    /// Unitary plane-wave matrix; column `k` holds the mode with integer
    /// wavevector `k` (decoded per axis like a site index).
    basis: DMatrix<Complex64>,
}

impl KineticPropagator {
    pub fn new(model: &LatticeModel) -> Self {
        Self::from_geometry(model.dimension, model.sites_per_axis, model.spacing)
    }

    pub fn from_geometry(dimension: usize, l: usize, h: f64) -> Self {
        let m = l.pow(dimension as u32);
        let decode = |mut idx: usize| -> Vec<usize> {
            let mut c = vec![0usize; dimension];
            for axis in (0..dimension).rev() {
                c[axis] = idx % l;
                idx /= l;
            }
            c
        };
        let two_pi = 2.0 * std::f64::consts::PI;
        let eigenvalues = DVector::from_fn(m, |k, _| {
            decode(k)
                .iter()
                .map(|&ka| (2.0 - 2.0 * (two_pi * ka as f64 / l as f64).cos()) / (h * h))
                .sum()
        });
        let scale = 1.0 / (m as f64).sqrt();
        let basis = DMatrix::from_fn(m, m, |site, k| {
            let sc = decode(site);
            let kc = decode(k);
            let phase: f64 = sc
                .iter()
                .zip(&kc)
                .map(|(&j, &ka)| two_pi * (ka * j) as f64 / l as f64)
                .sum();
            Complex64::from_polar(scale, phase)
        });
        KineticPropagator { eigenvalues, basis }
    }

    /// Apply `exp(i Lap t)` (the free Schroedinger flow for `i d psi/dt = -Lap psi`).
    pub fn evolve(&self, psi: &DVector<Complex64>, t: f64) -> DVector<Complex64> {
        let mut coeffs = self.basis.adjoint() * psi;
        for (c, eps) in coeffs.iter_mut().zip(self.eigenvalues.iter()) {
            *c *= Complex64::from_polar(1.0, -eps * t);
        }
        &self.basis * coeffs
    }
}

/// Reusable solver: model reference, couplings, and the kinetic eigenbasis.
pub struct HartreeSolver<'a> {
    model: &'a LatticeModel,
    couplings: CouplingConstants,
    kinetic: KineticPropagator,
}

impl<'a> HartreeSolver<'a> {
    pub fn new(model: &'a LatticeModel, couplings: CouplingConstants) -> Self {
        HartreeSolver {
            model,
            couplings,
            kinetic: KineticPropagator::new(model),
        }
    }

    pub fn kinetic(&self) -> &KineticPropagator {
        &self.kinetic
    }

    /// Lattice convolution `(V * rho)_i = h^d sum_j V(i,j) rho_j`.
    fn convolve(&self, v: &DMatrix<f64>, rho: &DVector<f64>) -> DVector<f64> {
        (v * rho) * self.model.volume_element()
    }

    fn densities(state: &HartreeState) -> (DVector<f64>, DVector<f64>) {
        (state.u.map(|z| z.norm_sqr()), state.v.map(|z| z.norm_sqr()))
    }

    /// Effective one-body potentials seen by each species at the current densities.
    fn mean_field_potentials(&self, state: &HartreeState) -> (DVector<f64>, DVector<f64>) {
        let (rho_u, rho_v) = Self::densities(state);
        let w_u = self.convolve(&self.model.v1, &rho_u)
            + self.convolve(&self.model.v12, &rho_v) * self.couplings.c2;
        let w_v = self.convolve(&self.model.v2, &rho_v)
            + self.convolve(&self.model.v12, &rho_u) * self.couplings.c1;
        (w_u, w_v)
    }

    /// Right-hand side `(du/dt, dv/dt)` of the coupled system.
    pub fn rhs(&self, state: &HartreeState) -> Result<(DVector<Complex64>, DVector<Complex64>)> {
        let m = self.model.total_sites;
        if state.u.len() != m {
            return Err(Error::Dimension(format!(
                "state has {} sites, model has {m}",
                state.u.len()
            )));
        }
        let (w_u, w_v) = self.mean_field_potentials(state);
        let minus_i = Complex64::new(0.0, -1.0);
        let lap_u = kinetic_apply(&self.model.laplacian, &state.u);
        let lap_v = kinetic_apply(&self.model.laplacian, &state.v);
        let du = (lap_u + hadamard(&w_u, &state.u)) * minus_i;
        let dv = (lap_v + hadamard(&w_v, &state.v)) * minus_i;
        Ok((du, dv))
    }

    /// One Strang step of size `dt`.
    pub fn step_strang(&self, state: &HartreeState, dt: f64) -> Result<HartreeState> {
        if !(dt > 0.0) {
            return Err(Error::Config(format!("dt must be positive, got {dt}")));
        }
        if state.u.len() != self.model.total_sites {
            return Err(Error::Dimension(format!(
                "state has {} sites, model has {}",
                state.u.len(),
                self.model.total_sites
            )));
        }
        // Half potential phase with frozen densities.
        let (w_u, w_v) = self.mean_field_potentials(state);
        let mut u = phase_multiply(&state.u, &w_u, 0.5 * dt);
        let mut v = phase_multiply(&state.v, &w_v, 0.5 * dt);
        // Exact kinetic step.
        u = self.kinetic.evolve(&u, dt);
        v = self.kinetic.evolve(&v, dt);
        // Second half phase with densities recomputed after the kinetic stage.
        let mid = HartreeState {
            u,
            v,
            t: state.t,
            vol: state.vol,
        };
        let (w_u, w_v) = self.mean_field_potentials(&mid);
        Ok(HartreeState {
            u: phase_multiply(&mid.u, &w_u, 0.5 * dt),
            v: phase_multiply(&mid.v, &w_v, 0.5 * dt),
            t: state.t + dt,
            vol: state.vol,
        })
    }

    /// Conserved energy functional
    /// `E = c1 <u,-Lap u> + c2 <v,-Lap v> + (c1/2) V1[rho_u,rho_u] + (c2/2) V2[rho_v,rho_v] + c1 c2 V12[rho_u,rho_v]`
    /// with every integral weighted by `h^d` per variable.
    pub fn energy(&self, state: &HartreeState) -> f64 {
        let vol = self.model.volume_element();
        let (rho_u, rho_v) = Self::densities(state);
        let kin_u = state
            .u
            .dotc(&kinetic_apply(&self.model.laplacian, &state.u))
            .re;
        let kin_v = state
            .v
            .dotc(&kinetic_apply(&self.model.laplacian, &state.v))
            .re;
        let pair = |vm: &DMatrix<f64>, a: &DVector<f64>, b: &DVector<f64>| -> f64 {
            a.dot(&(vm * b)) * vol * vol
        };
        let c = self.couplings;
        c.c1 * kin_u * vol
            + c.c2 * kin_v * vol
            + 0.5 * c.c1 * pair(&self.model.v1, &rho_u, &rho_u)
            + 0.5 * c.c2 * pair(&self.model.v2, &rho_v, &rho_v)
            + c.c1 * c.c2 * pair(&self.model.v12, &rho_u, &rho_v)
    }

    /// Evolve to `t_final` in steps of `dt`, recording a sample every `stride`
    /// steps (the initial state and the final step are always recorded).
    pub fn evolve(
        &self,
        initial: &HartreeState,
        t_final: f64,
        dt: f64,
        stride: usize,
    ) -> Result<HartreeTrajectory> {
        if !(dt > 0.0) {
            return Err(Error::Config(format!("dt must be positive, got {dt}")));
        }
        if t_final < 0.0 {
            return Err(Error::Config(format!(
                "t_final must be nonnegative, got {t_final}"
            )));
        }
        if stride == 0 {
            return Err(Error::Config("sample stride must be positive".into()));
        }
        let (m1, m2) = initial.mass();
        if (m1 - 1.0).abs() > 1e-8 || (m2 - 1.0).abs() > 1e-8 {
            return Err(Error::Config(format!(
                "initial state must be normalized, got masses ({m1}, {m2})"
            )));
        }
        let steps = (t_final / dt).round() as usize;
        let mut state = initial.clone();
        let mut trajectory = HartreeTrajectory {
            samples: vec![self.sample(&state)],
        };
        for step in 1..=steps {
            state = self.step_strang(&state, dt)?;
            if !state.is_finite() {
                return Err(Error::Numerical(format!(
                    "non-finite orbital at step {step} (t = {})",
                    state.t
                )));
            }
            if step % stride == 0 || step == steps {
                trajectory.samples.push(self.sample(&state));
            }
        }
        Ok(trajectory)
    }

    fn sample(&self, state: &HartreeState) -> TrajectorySample {
        let (mass1, mass2) = state.mass();
        TrajectorySample {
            mass1,
            mass2,
            energy: self.energy(state),
            state: state.clone(),
        }
    }
}

fn hadamard(w: &DVector<f64>, psi: &DVector<Complex64>) -> DVector<Complex64> {
    DVector::from_fn(psi.len(), |i, _| psi[i] * w[i])
}

/// `psi -> exp(-i dt w) .* psi` elementwise.
fn phase_multiply(psi: &DVector<Complex64>, w: &DVector<f64>, dt: f64) -> DVector<Complex64> {
    DVector::from_fn(psi.len(), |i, _| {
        psi[i] * Complex64::from_polar(1.0, -dt * w[i])
    })
}

/// Real symmetric matrix times complex vector.
pub(crate) fn kinetic_apply(m: &DMatrix<f64>, psi: &DVector<Complex64>) -> DVector<Complex64> {
    let re = m * psi.map(|z| z.re);
    let im = m * psi.map(|z| z.im);
    DVector::from_fn(psi.len(), |i, _| Complex64::new(re[i], im[i]))
}

/* Free-function forms of the operations. */

/// Right-hand side of the coupled system for a one-off evaluation.
pub fn hartree_rhs(
    state: &HartreeState,
    model: &LatticeModel,
    couplings: CouplingConstants,
) -> Result<(DVector<Complex64>, DVector<Complex64>)> {
    HartreeSolver::new(model, couplings).rhs(state)
}

/// One Strang step for a one-off evaluation (prefer [`HartreeSolver`] in loops).
pub fn step_strang(
    state: &HartreeState,
    model: &LatticeModel,
    couplings: CouplingConstants,
    dt: f64,
) -> Result<HartreeState> {
    HartreeSolver::new(model, couplings).step_strang(state, dt)
}

/// Evolve to `t_final` with sampling; see [`HartreeSolver::evolve`].
pub fn evolve(
    initial: &HartreeState,
    model: &LatticeModel,
    couplings: CouplingConstants,
    t_final: f64,
    dt: f64,
    stride: usize,
) -> Result<HartreeTrajectory> {
    HartreeSolver::new(model, couplings).evolve(initial, t_final, dt, stride)
}

/// Energy functional; see [`HartreeSolver::energy`].
pub fn energy(state: &HartreeState, model: &LatticeModel, couplings: CouplingConstants) -> f64 {
    HartreeSolver::new(model, couplings).energy(state)
}

/// One recorded point of a trajectory.
#[derive(Debug, Clone)]
pub struct TrajectorySample {
    pub state: HartreeState,
    pub mass1: f64,
    pub mass2: f64,
    pub energy: f64,
}

/// Ordered samples of a Hartree run with per-sample diagnostics.
#[derive(Debug, Clone)]
pub struct HartreeTrajectory {
    pub samples: Vec<TrajectorySample>,
}

impl HartreeTrajectory {
    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.state.t).collect()
    }

    /// Locate the sample closest to `t` (must lie within `tol`).
    pub fn sample_at(&self, t: f64, tol: f64) -> Result<&TrajectorySample> {
        self.samples
            .iter()
            .min_by(|a, b| {
                (a.state.t - t)
                    .abs()
                    .partial_cmp(&(b.state.t - t).abs())
                    .unwrap()
            })
            .filter(|s| (s.state.t - t).abs() <= tol)
            .ok_or_else(|| {
                Error::Numerical(format!("no trajectory sample within {tol} of t = {t}"))
            })
    }

    /// Write diagnostics as CSV with columns `t,mass1,mass2,energy`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::from("t,mass1,mass2,energy\n");
        for s in &self.samples {
            out.push_str(&format!(
                "{:.12e},{:.16e},{:.16e},{:.16e}\n",
                s.state.t, s.mass1, s.mass2, s.energy
            ));
        }
        std::fs::write(path, out).map_err(|e| Error::io(path.display().to_string(), e))
    }

    /// Write full field snapshots as flat binary records (little-endian f64
    /// re/im pairs, `u` then `v` per sample) plus a sidecar text header
    /// describing the layout.
    pub fn write_fields(&self, data_path: &Path, header_path: &Path) -> Result<()> {
        let m = self.samples.first().map(|s| s.state.u.len()).unwrap_or(0);
        let mut file = std::fs::File::create(data_path)
            .map_err(|e| Error::io(data_path.display().to_string(), e))?;
        let mut buf = Vec::with_capacity(self.samples.len() * m * 4 * 8);
        for s in &self.samples {
            for z in s.state.u.iter().chain(s.state.v.iter()) {
                buf.extend_from_slice(&z.re.to_le_bytes());
                buf.extend_from_slice(&z.im.to_le_bytes());
            }
        }
        file.write_all(&buf)
            .map_err(|e| Error::io(data_path.display().to_string(), e))?;
        let header = format!(
            "format: little-endian f64 (re, im) pairs\n\
             record: u[0..{m}] then v[0..{m}] per sample\n\
             samples: {}\n\
             sites: {m}\n\
             times: {}\n",
            self.samples.len(),
            self.times()
                .iter()
                .map(|t| format!("{t:.9}"))
                .collect::<Vec<_>>()
                .join(" ")
        );
        std::fs::write(header_path, header)
            .map_err(|e| Error::io(header_path.display().to_string(), e))
    }
}

/// Sample an initial orbital shape on the lattice and normalize it.
pub fn initial_orbital(shape: &OrbitalShape, model: &LatticeModel) -> Result<DVector<Complex64>> {
    let m = model.total_sites;
    let l = model.sites_per_axis;
    let d = model.dimension;
    let h = model.spacing;
    let coords = |mut idx: usize| -> Vec<usize> {
        let mut c = vec![0usize; d];
        for axis in (0..d).rev() {
            c[axis] = idx % l;
            idx /= l;
        }
        c
    };
    let raw: DVector<Complex64> = match shape {
        OrbitalShape::Uniform => DVector::from_element(m, Complex64::new(1.0, 0.0)),
        OrbitalShape::GaussianBump { center, width } => {
            if *center >= m {
                return Err(Error::Config(format!(
                    "bump center {center} outside lattice of {m} sites"
                )));
            }
            if !(*width > 0.0) {
                return Err(Error::Config("bump width must be positive".into()));
            }
            let cc = coords(*center);
            DVector::from_fn(m, |i, _| {
                let ci = coords(i);
                let mut r2 = 0.0;
                for axis in 0..d {
                    let delta = ci[axis].abs_diff(cc[axis]);
                    let wrapped = delta.min(l - delta) as f64 * h;
                    r2 += wrapped * wrapped;
                }
                Complex64::new((-r2 / (2.0 * width * width)).exp(), 0.0)
            })
        }
        OrbitalShape::PlaneWave { mode } => DVector::from_fn(m, |i, _| {
            let ci = coords(i);
            let total: usize = ci.iter().sum();
            Complex64::from_polar(
                1.0,
                2.0 * std::f64::consts::PI * (*mode as f64) * (total as f64) / (l as f64),
            )
        }),
    };
    let norm = (model.volume_element() * raw.norm_squared()).sqrt();
    Ok(raw / Complex64::from(norm))
}
