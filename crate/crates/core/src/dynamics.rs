//! Conservative evolution of the scalar field and of the field–dimer
//! (polaron) system.
//!
//! # Equations of motion
//!
//! The polaron action, with the φ⁴ self-interaction of the scalar field kept,
//! is `S = ∫dt dx ℒ` with
//!
//! ```text
//! ℒ = ½(φ_t² − φ_x² − m²φ²) − (ε/4)φ⁴
//!   + g²(Ψ*_t Ψ_t − Ψ*_x Ψ_x − M² Ψ*Ψ) − g Ψ*Ψ φ²
//! ```
//!
//! Euler–Lagrange in φ:  `φ_tt − φ_xx + m²φ + εφ³ + 2g|Ψ|²φ = 0`.
//! Euler–Lagrange in Ψ*: `g²(Ψ_tt − Ψ_xx + M²Ψ) + gφ²Ψ = 0`.
//!
//! `Ψ ≡ 0` recovers the scalar equation; `ε = 0` is the bare polaron action.
//! The integrals of motion with the signs that make them conserved are
//!
//! ```text
//! H = ½∫(π² + φ_x² + m²φ² + (ε/2)φ⁴) + g²∫(|Ψ_t|² + |Ψ_x|² + M²|Ψ|²) + g∫|Ψ|²φ²
//! P = ∫π φ_x + g²∫(Ψ*_t Ψ_x + Ψ*_x Ψ_t)
//! ```
//!
//! with `π = φ_t`.
//!
//! # Integrator
//!
//! Second-order Strang splitting: half a step of the free Klein–Gordon flow
//! (exact in the Fourier/sine basis), a full kick by the local potential
//! (exact, positions fixed), another free half step. A negative `dt` runs the
//! same scheme backwards in time.

use std::io::Write;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::elliptic::TravelingWaveProfile;
use crate::error::{Error, Result};
use crate::lindstedt::LindstedtSolution;
use crate::spectral::{Boundary, SpectralGrid};

/// Largest admissible `|dt| / Δx`.
pub const CFL_LIMIT: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldState {
    pub grid_n: usize,
    pub boundary: Boundary,
    pub phi: Vec<f64>,
    pub pi: Vec<f64>,
    pub time: f64,
    pub mass: f64,
    pub epsilon: f64,
}

impl FieldState {
    pub fn new(boundary: Boundary, phi: Vec<f64>, pi: Vec<f64>, mass: f64, epsilon: f64) -> Result<Self> {
        let s = FieldState { grid_n: phi.len(), boundary, phi, pi, time: 0.0, mass, epsilon };
        s.validate()?;
        Ok(s)
    }

    /// Samples `φ(x, 0)` and `φ_t(x, 0)` from closures on the grid.
    pub fn from_fn(
        grid_n: usize,
        boundary: Boundary,
        mass: f64,
        epsilon: f64,
        phi: impl Fn(f64) -> f64,
        pi: impl Fn(f64) -> f64,
    ) -> Result<Self> {
        let h = 2.0 * std::f64::consts::PI / grid_n as f64;
        let xs: Vec<f64> = (0..grid_n).map(|j| j as f64 * h).collect();
        let mut p: Vec<f64> = xs.iter().map(|&x| phi(x)).collect();
        let mut q: Vec<f64> = xs.iter().map(|&x| pi(x)).collect();
        if boundary == Boundary::DirichletSine && grid_n > 0 {
            p[0] = 0.0;
            q[0] = 0.0;
        }
        FieldState::new(boundary, p, q, mass, epsilon)
    }

    /// Standing wave at `t = 0` on the Dirichlet grid.
    pub fn from_lindstedt(sol: &LindstedtSolution, grid_n: usize) -> Result<Self> {
        Self::from_lindstedt_with(sol, grid_n, Boundary::DirichletSine)
    }

    /// Standing wave at `t = 0`; integer sine modes are also periodic, so
    /// either boundary can host it.
    pub fn from_lindstedt_with(sol: &LindstedtSolution, grid_n: usize, boundary: Boundary) -> Result<Self> {
        FieldState::from_fn(grid_n, boundary, sol.mass, sol.epsilon, |x| sol.jet(x, 0.0).value, |x| sol.jet(x, 0.0).dt)
    }

    /// Traveling wave at `t = 0` on the periodic grid.
    pub fn from_traveling_wave(p: &TravelingWaveProfile, grid_n: usize) -> Result<Self> {
        FieldState::from_fn(grid_n, Boundary::Periodic, p.mass, p.epsilon, |x| p.jet(x, 0.0).value, |x| p.jet(x, 0.0).dt)
    }

    pub fn validate(&self) -> Result<()> {
        if self.grid_n < 4 {
            return Err(Error::InvalidInput(format!("grid_n must be >= 4, got {}", self.grid_n)));
        }
        for (name, len) in [("phi", self.phi.len()), ("pi", self.pi.len())] {
            if len != self.grid_n {
                return Err(Error::InvalidInput(format!("{name} has {len} samples, grid_n = {}", self.grid_n)));
            }
        }
        if self.phi.iter().chain(&self.pi).any(|v| !v.is_finite()) || !self.time.is_finite() {
            return Err(Error::InvalidInput("non-finite field sample".into()));
        }
        if !(self.mass >= 0.0 && self.mass.is_finite()) || !self.epsilon.is_finite() {
            return Err(Error::InvalidInput("mass must be finite and >= 0, epsilon finite".into()));
        }
        if self.boundary == Boundary::DirichletSine && (self.phi[0] != 0.0 || self.pi[0] != 0.0) {
            return Err(Error::InvalidInput("dirichlet_sine state must vanish at x = 0".into()));
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<SpectralGrid> {
        SpectralGrid::new(self.grid_n, self.boundary)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolaronState {
    #[serde(flatten)]
    pub field: FieldState,
    pub psi: Vec<Complex64>,
    pub psi_t: Vec<Complex64>,
    pub coupling: f64,
    pub dimer_mass: f64,
}

impl PolaronState {
    pub fn new(field: FieldState, psi: Vec<Complex64>, psi_t: Vec<Complex64>, coupling: f64, dimer_mass: f64) -> Result<Self> {
        let s = PolaronState { field, psi, psi_t, coupling, dimer_mass };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        self.field.validate()?;
        let n = self.field.grid_n;
        if self.psi.len() != n || self.psi_t.len() != n {
            return Err(Error::InvalidInput("psi arrays must match grid_n".into()));
        }
        if self.psi.iter().chain(&self.psi_t).any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidInput("non-finite psi sample".into()));
        }
        if !(self.coupling > 0.0 && self.coupling.is_finite()) {
            return Err(Error::InvalidInput(format!("coupling g must be > 0, got {}", self.coupling)));
        }
        if !(self.dimer_mass >= 0.0 && self.dimer_mass.is_finite()) {
            return Err(Error::InvalidInput("dimer mass must be finite and >= 0".into()));
        }
        if self.field.boundary == Boundary::DirichletSine
            && (self.psi[0] != Complex64::new(0.0, 0.0) || self.psi_t[0] != Complex64::new(0.0, 0.0))
        {
            return Err(Error::InvalidInput("dirichlet_sine state must vanish at x = 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConservedQuantities {
    pub energy: f64,
    pub momentum: f64,
}

fn check_dt(grid: &SpectralGrid, dt: f64) -> Result<()> {
    let bound = CFL_LIMIT * grid.dx();
    if !dt.is_finite() || dt == 0.0 || dt.abs() > bound {
        return Err(Error::Stability { dt, bound });
    }
    Ok(())
}

fn kick_kg(state: &mut FieldState, dt: f64) {
    let eps = state.epsilon;
    for (p, &f) in state.pi.iter_mut().zip(&state.phi) {
        *p -= dt * eps * f * f * f;
    }
}

fn kick_polaron(state: &mut PolaronState, dt: f64) {
    let g = state.coupling;
    let eps = state.field.epsilon;
    for j in 0..state.field.grid_n {
        let f = state.field.phi[j];
        let psi = state.psi[j];
        state.field.pi[j] -= dt * (eps * f * f * f + 2.0 * g * psi.norm_sqr() * f);
        state.psi_t[j] -= psi * (dt * f * f / g);
    }
}

/// A state the integrator knows how to advance.
pub trait Evolvable: Clone {
    fn field(&self) -> &FieldState;
    fn advance(&mut self, grid: &SpectralGrid, dt: f64) -> Result<()>;
    fn conserved_on(&self, grid: &SpectralGrid) -> ConservedQuantities;
}

impl Evolvable for FieldState {
    fn field(&self) -> &FieldState {
        self
    }

    fn advance(&mut self, grid: &SpectralGrid, dt: f64) -> Result<()> {
        check_dt(grid, dt)?;
        let m = self.mass;
        grid.propagate_free(&mut self.phi, &mut self.pi, m, 0.5 * dt);
        kick_kg(self, dt);
        grid.propagate_free(&mut self.phi, &mut self.pi, m, 0.5 * dt);
        self.time += dt;
        Ok(())
    }

    fn conserved_on(&self, grid: &SpectralGrid) -> ConservedQuantities {
        ConservedQuantities { energy: field_energy(self, grid), momentum: field_momentum(self, grid) }
    }
}

impl Evolvable for PolaronState {
    fn field(&self) -> &FieldState {
        &self.field
    }

    fn advance(&mut self, grid: &SpectralGrid, dt: f64) -> Result<()> {
        check_dt(grid, dt)?;
        let (m, big_m) = (self.field.mass, self.dimer_mass);
        grid.propagate_free(&mut self.field.phi, &mut self.field.pi, m, 0.5 * dt);
        grid.propagate_free_complex(&mut self.psi, &mut self.psi_t, big_m, 0.5 * dt);
        kick_polaron(self, dt);
        grid.propagate_free(&mut self.field.phi, &mut self.field.pi, m, 0.5 * dt);
        grid.propagate_free_complex(&mut self.psi, &mut self.psi_t, big_m, 0.5 * dt);
        self.field.time += dt;
        Ok(())
    }

    fn conserved_on(&self, grid: &SpectralGrid) -> ConservedQuantities {
        let g = self.coupling;
        let m2 = self.dimer_mass * self.dimer_mass;
        let psi_x = grid.derivative_complex(&self.psi);
        let dimer = grid.integrate((0..self.field.grid_n).map(|j| {
            self.psi_t[j].norm_sqr() + psi_x[j].norm_sqr() + m2 * self.psi[j].norm_sqr()
        }));
        let coupling = grid.integrate((0..self.field.grid_n).map(|j| self.psi[j].norm_sqr() * self.field.phi[j].powi(2)));
        let dimer_p = grid.integrate((0..self.field.grid_n).map(|j| 2.0 * (self.psi_t[j].conj() * psi_x[j]).re));
        ConservedQuantities {
            energy: field_energy(&self.field, grid) + g * g * dimer + g * coupling,
            momentum: field_momentum(&self.field, grid) + g * g * dimer_p,
        }
    }
}

fn field_energy(s: &FieldState, grid: &SpectralGrid) -> f64 {
    let phi_x = grid.derivative(&s.phi);
    let (m2, eps) = (s.mass * s.mass, s.epsilon);
    0.5 * grid.integrate((0..s.grid_n).map(|j| {
        let f = s.phi[j];
        s.pi[j] * s.pi[j] + phi_x[j] * phi_x[j] + m2 * f * f + 0.5 * eps * f * f * f * f
    }))
}

fn field_momentum(s: &FieldState, grid: &SpectralGrid) -> f64 {
    let phi_x = grid.derivative(&s.phi);
    grid.integrate((0..s.grid_n).map(|j| s.pi[j] * phi_x[j]))
}

/// One Strang step of the scalar field equation.
pub fn step_kg(state: &FieldState, dt: f64) -> Result<FieldState> {
    let mut out = state.clone();
    out.advance(&state.grid()?, dt)?;
    Ok(out)
}

/// One Strang step of the coupled field–dimer system.
pub fn step_polaron(state: &PolaronState, dt: f64) -> Result<PolaronState> {
    let mut out = state.clone();
    out.advance(&state.field.grid()?, dt)?;
    Ok(out)
}

/// Total energy (trapezoid quadrature, spectral derivatives).
pub fn energy<S: Evolvable>(state: &S) -> f64 {
    let grid = state.field().grid().expect("validated state");
    state.conserved_on(&grid).energy
}

/// Total momentum.
pub fn momentum<S: Evolvable>(state: &S) -> f64 {
    let grid = state.field().grid().expect("validated state");
    state.conserved_on(&grid).momentum
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticRecord {
    pub step: usize,
    pub time: f64,
    pub energy: f64,
    pub momentum: f64,
}

#[derive(Debug, Clone)]
pub struct Evolution<S> {
    pub records: Vec<DiagnosticRecord>,
    pub state: S,
}

impl<S> Evolution<S> {
    /// `max |H(t) − H(0)| / |H(0)|` against the given reference energy.
    pub fn max_relative_energy_drift(&self, reference: f64) -> f64 {
        self.records.iter().map(|r| (r.energy - reference).abs() / reference.abs()).fold(0.0, f64::max)
    }

    pub fn max_relative_momentum_drift(&self, reference: f64) -> f64 {
        self.records.iter().map(|r| (r.momentum - reference).abs() / reference.abs()).fold(0.0, f64::max)
    }
}

/// Runs `n_steps` steps, recording H and P after every `record_every`-th step.
pub fn evolve_with_diagnostics<S: Evolvable>(
    state: &S,
    dt: f64,
    n_steps: usize,
    record_every: usize,
) -> Result<Evolution<S>> {
    if record_every == 0 {
        return Err(Error::InvalidInput("record_every must be >= 1".into()));
    }
    let grid = state.field().grid()?;
    if n_steps > 0 {
        check_dt(&grid, dt)?;
    }
    let mut s = state.clone();
    let mut records = Vec::with_capacity(n_steps / record_every);
    for step in 1..=n_steps {
        s.advance(&grid, dt)?;
        if step % record_every == 0 {
            let c = s.conserved_on(&grid);
            records.push(DiagnosticRecord { step, time: s.field().time, energy: c.energy, momentum: c.momentum });
        }
    }
    Ok(Evolution { records, state: s })
}

/// Writes `step,time,energy,momentum` rows; floats use the shortest
/// round-trip decimal representation.
pub fn write_diagnostics_csv<W: Write>(records: &[DiagnosticRecord], mut out: W) -> std::io::Result<()> {
    writeln!(out, "step,time,energy,momentum")?;
    for r in records {
        writeln!(out, "{},{:?},{:?},{:?}", r.step, r.time, r.energy, r.momentum)?;
    }
    Ok(())
}
