//! Fluctuations about a classical background `v(x, t)`.
//!
//! The field is split as `φ = g·v + u` with the bookkeeping `εg² = 1`, so the
//! cubic self-interaction of the background appears at the same order in `g`
//! as its linear terms. The Hamiltonian then reads
//! `g²H₋₂ + gH₋₁ + H₀ + …`:
//!
//! * `H₋₂` is the classical energy of the background,
//! * `H₋₁` is linear in the fluctuation with coefficient
//!   `v_tt − v_xx + m²v + εv³`; it vanishes exactly when the background solves
//!   the field equation (point-dimer limit of the nonlocal source term),
//! * `H₀` is the quadratic form of the linearized operator
//!   `u_tt − u_xx + m²u + 3εv²u`.
//!
//! Below, `v` denotes the background in field units (`g` already absorbed), so
//! every formula carries `ε` explicitly and `g` is only reported.
//!
//! Floquet analysis integrates the linearization over one background period
//! in a Galerkin basis (orthonormal sines for Dirichlet backgrounds, a real
//! Fourier basis for periodic ones). The truncated system `c̈ = −(Ω² + B(t))c`
//! has symmetric `B`, and the splitting integrator is symplectic, so the
//! monodromy matrix is symplectic and its multipliers pair as `λ ↔ 1/λ`.
//!
//! Translation invariance makes `∂_x v` and `∂_t v` exact solutions of the
//! linearization; [`zero_mode_residual`] measures how well the discrete
//! evolution preserves them.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{FieldState, CFL_LIMIT};
use crate::elliptic::TravelingWaveProfile;
use crate::error::{Error, Result};
use crate::jet::FieldJet;
use crate::lindstedt::LindstedtSolution;
use crate::spectral::{Boundary, SpectralGrid};

/// Default number of Galerkin modes for the monodromy matrix.
pub const DEFAULT_MODES: usize = 32;
/// Grid used by [`monodromy`] for its zero-mode diagnostic.
pub const ZERO_MODE_GRID: usize = 128;
/// `dt / Δx` used by the zero-mode evolution.
pub const ZERO_MODE_CFL: f64 = 0.1;
const MAX_GALERKIN_MODES: usize = 256;
const SCHUR_MAX_ITERATIONS: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BackgroundSource {
    Lindstedt(LindstedtSolution),
    TravelingWave(TravelingWaveProfile),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Background {
    pub source: BackgroundSource,
    /// Semiclassical scale, `1/√ε` for `ε > 0` and 1 otherwise.
    pub coupling: f64,
    /// Temporal period of the background.
    pub period: f64,
}

impl Background {
    pub fn new(source: BackgroundSource) -> Result<Self> {
        let (eps, period) = match &source {
            BackgroundSource::Lindstedt(s) => {
                s.validate()?;
                (s.epsilon, s.period())
            }
            BackgroundSource::TravelingWave(p) => (p.epsilon, p.temporal_period()),
        };
        if !(period > 0.0 && period.is_finite()) {
            return Err(Error::InvalidInput(format!("background period {period} must be finite and > 0")));
        }
        let coupling = if eps > 0.0 { 1.0 / eps.sqrt() } else { 1.0 };
        Ok(Background { source, coupling, period })
    }

    pub fn from_lindstedt(sol: LindstedtSolution) -> Result<Self> {
        Self::new(BackgroundSource::Lindstedt(sol))
    }

    pub fn from_traveling_wave(p: TravelingWaveProfile) -> Result<Self> {
        Self::new(BackgroundSource::TravelingWave(p))
    }

    /// Trivial background `v = 0` with field mass `m` on the Dirichlet sine
    /// basis (period `2π`).
    pub fn vacuum(mass: f64) -> Result<Self> {
        Self::from_lindstedt(LindstedtSolution {
            epsilon: 0.0,
            mass,
            omega_corrections: vec![0.0],
            orders: vec![crate::series::SineSeries2D::zeros(1, 1)],
            omega0: 1.0,
        })
    }

    pub fn mass(&self) -> f64 {
        match &self.source {
            BackgroundSource::Lindstedt(s) => s.mass,
            BackgroundSource::TravelingWave(p) => p.mass,
        }
    }

    pub fn epsilon(&self) -> f64 {
        match &self.source {
            BackgroundSource::Lindstedt(s) => s.epsilon,
            BackgroundSource::TravelingWave(p) => p.epsilon,
        }
    }

    /// Natural boundary condition of the background representation.
    pub fn boundary(&self) -> Boundary {
        match &self.source {
            BackgroundSource::Lindstedt(_) => Boundary::DirichletSine,
            BackgroundSource::TravelingWave(_) => Boundary::Periodic,
        }
    }

    pub fn jet(&self, x: f64, t: f64) -> FieldJet {
        match &self.source {
            BackgroundSource::Lindstedt(s) => s.jet(x, t),
            BackgroundSource::TravelingWave(p) => p.jet(x, t),
        }
    }

    /// Samples of `v(·, t)` on `points`.
    fn samples(&self, points: &[f64], t: f64) -> Vec<f64> {
        match &self.source {
            BackgroundSource::Lindstedt(s) => {
                let series = s.total_series();
                let tau = s.omega() * t;
                points.iter().map(|&x| series.eval(x, tau)).collect()
            }
            BackgroundSource::TravelingWave(_) => points.iter().map(|&x| self.jet(x, t).value).collect(),
        }
    }

    /// Background state at time `t` on its natural grid.
    pub fn field_state(&self, grid_n: usize, t: f64) -> Result<FieldState> {
        let mut s = FieldState::from_fn(
            grid_n,
            self.boundary(),
            self.mass(),
            self.epsilon(),
            |x| self.jet(x, t).value,
            |x| self.jet(x, t).dt,
        )?;
        s.time = t;
        Ok(s)
    }

    /// Highest spatial wavenumber of a trigonometric-polynomial background.
    fn spatial_bandwidth(&self) -> Option<usize> {
        match &self.source {
            BackgroundSource::Lindstedt(s) => Some(s.total_series().kmax()),
            BackgroundSource::TravelingWave(_) => None,
        }
    }
}

/// Max-norm over `x_i = 2πi/grid_n` of `v_tt − v_xx + m²v + εv³` at time `t`.
pub fn h_minus1_residual(bg: &Background, grid_n: usize, t: f64) -> f64 {
    let (m, eps) = (bg.mass(), bg.epsilon());
    (0..grid_n)
        .map(|i| bg.jet(2.0 * PI * i as f64 / grid_n as f64, t).kg_residual(m, eps).abs())
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq)]
pub struct HamiltonianExpansion {
    /// Classical energy of the background.
    pub h_minus2: f64,
    /// Discrete L² norm of the coefficient of the linear term.
    pub h_minus1_norm: f64,
    /// `3εv²(x_j, t)` on the grid.
    pub linearized_mass_term: Vec<f64>,
}

/// Order-by-order pieces of the Hamiltonian at time `t`, from analytic
/// background derivatives on a `grid_n` trapezoid grid.
pub fn expand_hamiltonian(bg: &Background, grid_n: usize, t: f64) -> HamiltonianExpansion {
    let (m, eps) = (bg.mass(), bg.epsilon());
    let h = 2.0 * PI / grid_n as f64;
    let jets: Vec<FieldJet> = (0..grid_n).map(|i| bg.jet(i as f64 * h, t)).collect();
    let h_minus2 = 0.5
        * h
        * jets
            .iter()
            .map(|j| {
                let v = j.value;
                j.dt * j.dt + j.dx * j.dx + m * m * v * v + 0.5 * eps * v.powi(4)
            })
            .sum::<f64>();
    let h_minus1_norm = (h * jets.iter().map(|j| j.kg_residual(m, eps).powi(2)).sum::<f64>()).sqrt();
    let linearized_mass_term = jets.iter().map(|j| 3.0 * eps * j.value * j.value).collect();
    HamiltonianExpansion { h_minus2, h_minus1_norm, linearized_mass_term }
}

/// Spatial part of the linearized operator at time `t`:
/// `−u_xx + m²u + 3εv²u`, with `u` sampled on the background's natural grid.
pub fn linearized_apply(bg: &Background, u: &[f64], t: f64) -> Result<Vec<f64>> {
    if u.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidInput("non-finite fluctuation sample".into()));
    }
    let grid = SpectralGrid::new(u.len(), bg.boundary())?;
    if bg.boundary() == Boundary::DirichletSine && u[0] != 0.0 {
        return Err(Error::InvalidInput("fluctuation must vanish at x = 0 on a Dirichlet background".into()));
    }
    let uxx = grid.second_derivative(u);
    let v = bg.samples(&grid.points(), t);
    let (m2, eps) = (bg.mass() * bg.mass(), bg.epsilon());
    Ok((0..u.len()).map(|j| -uxx[j] + m2 * u[j] + 3.0 * eps * v[j] * v[j] * u[j]).collect())
}

/// Orthonormal Galerkin basis on `[0, 2π]`: `(wavenumber, kind)`.
#[derive(Debug, Clone, Copy)]
enum BasisFn {
    Const,
    Sin(usize),
    Cos(usize),
}

impl BasisFn {
    fn wavenumber(self) -> f64 {
        match self {
            BasisFn::Const => 0.0,
            BasisFn::Sin(k) | BasisFn::Cos(k) => k as f64,
        }
    }

    fn eval(self, x: f64) -> f64 {
        match self {
            BasisFn::Const => 1.0 / (2.0 * PI).sqrt(),
            BasisFn::Sin(k) => (k as f64 * x).sin() / PI.sqrt(),
            BasisFn::Cos(k) => (k as f64 * x).cos() / PI.sqrt(),
        }
    }
}

fn galerkin_basis(boundary: Boundary, n: usize) -> Vec<BasisFn> {
    match boundary {
        Boundary::DirichletSine => (1..=n).map(BasisFn::Sin).collect(),
        Boundary::Periodic => {
            let mut b = vec![BasisFn::Const];
            let mut k = 1;
            while b.len() < n {
                b.push(BasisFn::Sin(k));
                if b.len() < n {
                    b.push(BasisFn::Cos(k));
                }
                k += 1;
            }
            b
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZeroModeResidual {
    pub r_x: f64,
    pub r_t: f64,
    /// Set when a generator vanishes identically (e.g. zero background).
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FloquetReport {
    pub multipliers: Vec<Complex64>,
    pub zero_mode_residuals: ZeroModeResidual,
    pub truncation: usize,
    pub monodromy: DMatrix<f64>,
}

#[derive(Serialize, Deserialize)]
struct FloquetJson {
    multipliers: Vec<[f64; 2]>,
    zero_mode: [f64; 2],
    n_modes: usize,
}

impl FloquetReport {
    /// `{"multipliers": [[re,im],...], "zero_mode": [r_x, r_t], "n_modes": n}`.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(FloquetJson {
            multipliers: self.multipliers.iter().map(|z| [z.re, z.im]).collect(),
            zero_mode: [self.zero_mode_residuals.r_x, self.zero_mode_residuals.r_t],
            n_modes: self.truncation,
        })
        .expect("plain numeric payload")
    }

    /// Largest `min_μ |λμ − 1|` over all multipliers `λ`.
    pub fn reciprocal_pairing_defect(&self) -> f64 {
        self.multipliers
            .iter()
            .map(|l| self.multipliers.iter().map(|m| (l * m - 1.0).norm()).fold(f64::INFINITY, f64::min))
            .fold(0.0, f64::max)
    }
}

/// Parses the JSON written by [`FloquetReport::to_json`] back into
/// `(multipliers, zero_mode, n_modes)`.
pub fn parse_floquet_json(v: &serde_json::Value) -> Result<(Vec<Complex64>, [f64; 2], usize)> {
    let raw: FloquetJson = serde_json::from_value(v.clone()).map_err(|e| Error::InvalidInput(e.to_string()))?;
    Ok((raw.multipliers.iter().map(|p| Complex64::new(p[0], p[1])).collect(), raw.zero_mode, raw.n_modes))
}

/// Monodromy matrix of the Galerkin-truncated linearization over one period,
/// with `dt` shrunk so that an integer number of steps spans the period.
pub fn monodromy(bg: &Background, n_modes: usize, dt: f64) -> Result<FloquetReport> {
    let mut report = monodromy_matrix(bg, n_modes, dt)?;
    report.zero_mode_residuals = zero_mode_residual(bg, ZERO_MODE_GRID)?;
    Ok(report)
}

fn monodromy_matrix(bg: &Background, n_modes: usize, dt: f64) -> Result<FloquetReport> {
    if n_modes == 0 || n_modes > MAX_GALERKIN_MODES {
        return Err(Error::InvalidInput(format!("n_modes must be in 1..={MAX_GALERKIN_MODES}")));
    }
    let bound = CFL_LIMIT * 2.0 * PI / (2 * n_modes) as f64;
    if !(dt > 0.0 && dt.is_finite()) || dt > bound {
        return Err(Error::Stability { dt, bound });
    }
    let period = bg.period;
    let steps = (period / dt).ceil().max(1.0) as usize;
    let h = period / steps as f64;

    let basis = galerkin_basis(bg.boundary(), n_modes);
    let (m, eps) = (bg.mass(), bg.epsilon());
    let freqs: Vec<f64> = basis.iter().map(|b| (b.wavenumber().powi(2) + m * m).sqrt()).collect();

    let q = match bg.spatial_bandwidth() {
        Some(kv) => (4 * (kv + n_modes) + 16).next_power_of_two(),
        None => (8 * n_modes).max(512).next_power_of_two(),
    };
    let xq: Vec<f64> = (0..q).map(|i| 2.0 * PI * i as f64 / q as f64).collect();
    let table: Vec<Vec<f64>> = basis.iter().map(|b| xq.iter().map(|&x| b.eval(x)).collect()).collect();
    let dxq = 2.0 * PI / q as f64;
    let coupled = eps != 0.0;

    let coupling_matrix = |t: f64| -> DMatrix<f64> {
        let w: Vec<f64> = bg.samples(&xq, t).iter().map(|v| 3.0 * eps * v * v * dxq).collect();
        let n = basis.len();
        let entries: Vec<f64> = (0..n * n)
            .into_par_iter()
            .map(|idx| {
                let (i, j) = (idx / n, idx % n);
                table[i].iter().zip(&table[j]).zip(&w).map(|((a, b), w)| a * b * w).sum()
            })
            .collect();
        DMatrix::from_row_slice(n, n, &entries)
    };

    let n = basis.len();
    // columns: (positions, velocities) per basis initial condition
    let mut pos: Vec<Vec<f64>> = (0..2 * n).map(|c| (0..n).map(|i| f64::from(u8::from(c == i))).collect()).collect();
    let mut vel: Vec<Vec<f64>> = (0..2 * n).map(|c| (0..n).map(|i| f64::from(u8::from(c == n + i))).collect()).collect();

    let rotate = |p: &mut [f64], v: &mut [f64], tau: f64| {
        for i in 0..n {
            let w = freqs[i];
            let (a, b) = (p[i], v[i]);
            if w == 0.0 {
                p[i] = a + tau * b;
            } else {
                let (s, c) = (w * tau).sin_cos();
                p[i] = a * c + b * s / w;
                v[i] = -a * w * s + b * c;
            }
        }
    };

    for step in 0..steps {
        let kick = if coupled { Some(coupling_matrix((step as f64 + 0.5) * h)) } else { None };
        pos.par_iter_mut().zip(vel.par_iter_mut()).for_each(|(p, v)| {
            rotate(p, v, 0.5 * h);
            if let Some(b) = &kick {
                for i in 0..n {
                    let force: f64 = (0..n).map(|j| b[(i, j)] * p[j]).sum();
                    v[i] -= h * force;
                }
            }
            rotate(p, v, 0.5 * h);
        });
    }

    let mut mono = DMatrix::zeros(2 * n, 2 * n);
    for c in 0..2 * n {
        for i in 0..n {
            mono[(i, c)] = pos[c][i];
            mono[(n + i, c)] = vel[c][i];
        }
    }
    let mut multipliers = eigenvalues(&mono)?;
    multipliers.sort_by(|a, b| a.arg().total_cmp(&b.arg()).then(a.norm().total_cmp(&b.norm())));
    Ok(FloquetReport {
        multipliers,
        zero_mode_residuals: ZeroModeResidual { r_x: 0.0, r_t: 0.0, degenerate: true },
        truncation: n_modes,
        monodromy: mono,
    })
}

/// Eigenvalues of a real matrix. Near-multiples of the identity defeat the
/// plain Schur iteration, so shifted and rescaled copies are tried next.
fn eigenvalues(m: &DMatrix<f64>) -> Result<Vec<Complex64>> {
    let schur = |a: DMatrix<f64>| nalgebra::Schur::try_new(a, f64::EPSILON, SCHUR_MAX_ITERATIONS);
    if let Some(s) = schur(m.clone()) {
        return Ok(s.complex_eigenvalues().iter().copied().collect());
    }
    let n = m.nrows();
    for shift in [1.0, -1.0, 0.5, 0.0] {
        let shifted = m - DMatrix::identity(n, n) * shift;
        let scale = shifted.amax();
        if scale == 0.0 {
            return Ok(vec![Complex64::new(shift, 0.0); n]);
        }
        if let Some(s) = schur(shifted / scale) {
            return Ok(s.complex_eigenvalues().iter().map(|z| z * scale + shift).collect());
        }
    }
    Err(Error::NonConvergence { iterations: SCHUR_MAX_ITERATIONS, residual: f64::NAN })
}

// 4th-order symmetric composition of the Strang step (Yoshida).
const YOSHIDA: [f64; 3] = [1.351_207_191_959_657_8, -1.702_414_383_919_315_3, 1.351_207_191_959_657_8];

struct LinearizedFlow<'a> {
    bg: &'a Background,
    grid: SpectralGrid,
    points: Vec<f64>,
}

impl LinearizedFlow<'_> {
    fn strang(&self, u: &mut [f64], ut: &mut [f64], t: f64, h: f64) {
        let (m, eps) = (self.bg.mass(), self.bg.epsilon());
        self.grid.propagate_free(u, ut, m, 0.5 * h);
        let v = self.bg.samples(&self.points, t + 0.5 * h);
        for j in 0..u.len() {
            ut[j] -= h * 3.0 * eps * v[j] * v[j] * u[j];
        }
        self.grid.propagate_free(u, ut, m, 0.5 * h);
    }

    fn step(&self, u: &mut [f64], ut: &mut [f64], t: f64, h: f64) {
        let mut tt = t;
        for w in YOSHIDA {
            self.strang(u, ut, tt, w * h);
            tt += w * h;
        }
    }
}

/// Relative phase-space defect of the translation generators `∂_x v` and
/// `∂_t v` after one period of the full linearized evolution on a periodic
/// grid of `grid_n` points with `dt = 0.1 Δx`.
pub fn zero_mode_residual(bg: &Background, grid_n: usize) -> Result<ZeroModeResidual> {
    let grid = SpectralGrid::new(grid_n, Boundary::Periodic)?;
    let points = grid.points();
    let period = bg.period;
    let steps = (period / (ZERO_MODE_CFL * grid.dx())).ceil().max(1.0) as usize;
    let h = period / steps as f64;
    let flow = LinearizedFlow { bg, grid, points };

    let run = |gen: &dyn Fn(&FieldJet) -> (f64, f64)| -> Option<f64> {
        let initial: Vec<(f64, f64)> = flow.points.iter().map(|&x| gen(&bg.jet(x, 0.0))).collect();
        let target: Vec<(f64, f64)> = flow.points.iter().map(|&x| gen(&bg.jet(x, period))).collect();
        let norm: f64 = target.iter().map(|(a, b)| a * a + b * b).sum::<f64>().sqrt();
        if norm < 1e-300 {
            return None;
        }
        let mut u: Vec<f64> = initial.iter().map(|p| p.0).collect();
        let mut ut: Vec<f64> = initial.iter().map(|p| p.1).collect();
        for s in 0..steps {
            flow.step(&mut u, &mut ut, s as f64 * h, h);
        }
        let err: f64 = (0..u.len())
            .map(|j| (u[j] - target[j].0).powi(2) + (ut[j] - target[j].1).powi(2))
            .sum::<f64>()
            .sqrt();
        Some(err / norm)
    };

    let rx = run(&|j: &FieldJet| (j.dx, j.dxt));
    let rt = run(&|j: &FieldJet| (j.dt, j.dtt));
    Ok(ZeroModeResidual { r_x: rx.unwrap_or(0.0), r_t: rt.unwrap_or(0.0), degenerate: rx.is_none() || rt.is_none() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::energy;
    use crate::elliptic::fit_periodic_wave;
    use crate::lindstedt::{build_solution, pde_residual, solve_resonance_system, Normalization, ResonanceProblem};

    fn lindstedt_bg(eps: f64) -> (LindstedtSolution, Background) {
        let p = ResonanceProblem::new(3, Normalization::FixA1(1.0), 1e-13);
        let r = solve_resonance_system(&p, &[1.0], 0.28).unwrap();
        let sol = build_solution(&r.amplitudes, r.omega1, eps, 1e-12).unwrap();
        (sol.clone(), Background::from_lindstedt(sol).unwrap())
    }

    #[test]
    fn h_minus1_matches_pde_residual() {
        let (sol, bg) = lindstedt_bg(0.02);
        let n = 64;
        let worst = (0..n).map(|j| h_minus1_residual(&bg, n, bg.period * j as f64 / n as f64)).fold(0.0, f64::max);
        let pde = pde_residual(&sol, n).unwrap();
        assert!((worst - pde).abs() < 1e-12, "{worst} vs {pde}");
    }

    #[test]
    fn h_minus1_trivial_and_perturbed() {
        let bg = Background::vacuum(0.0).unwrap();
        assert_eq!(h_minus1_residual(&bg, 32, 0.3), 0.0);
        // v + 0.1 sin(2x) sin(ωt), carried by the first-order correction
        let (mut sol, _) = lindstedt_bg(0.02);
        let mut bump = crate::series::SineSeries2D::zeros(2, 1);
        bump.set(2, 1, 0.1 / sol.epsilon);
        sol.orders[1] = sol.orders[1].add(&bump);
        let bg = Background::from_lindstedt(sol).unwrap();
        let worst = (0..16).map(|j| h_minus1_residual(&bg, 64, bg.period * j as f64 / 16.0)).fold(0.0, f64::max);
        assert!(worst > 0.01, "{worst}");
    }

    #[test]
    fn linearized_on_vacuum_is_klein_gordon() {
        let m = 1.3;
        let bg = Background::vacuum(m).unwrap();
        let grid = SpectralGrid::new(64, Boundary::DirichletSine).unwrap();
        for k in 1..=8 {
            let u: Vec<f64> = grid.points().iter().map(|x| (k as f64 * x).sin()).collect();
            let lu = linearized_apply(&bg, &u, 0.0).unwrap();
            let num: f64 = lu.iter().zip(&u).map(|(a, b)| a * b).sum();
            let den: f64 = u.iter().map(|b| b * b).sum();
            let omega2 = (k * k) as f64 + m * m;
            assert!((num / den - omega2).abs() < 1e-10);
            assert!(lu.iter().zip(&u).all(|(a, b)| (a - omega2 * b).abs() < 1e-10));
        }
        assert!(linearized_apply(&bg, &[0.0; 16], 0.0).unwrap().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn linearized_matches_energy_hessian() {
        let p = fit_periodic_wave(1.0, 0.1, 2.0, 1).unwrap();
        let bg = Background::from_traveling_wave(p).unwrap();
        let t = 0.37;
        let grid = SpectralGrid::new(64, Boundary::Periodic).unwrap();
        let x = grid.points();
        let v = bg.samples(&x, t);
        let u: Vec<f64> = x.iter().map(|x| (2.0 * x).sin() + 0.3 * (x + 0.4).cos()).collect();
        let w: Vec<f64> = x.iter().map(|x| (3.0 * x).cos() - 0.2 * x.sin()).collect();
        // potential energy V[φ] via the dynamics energy with π = 0
        let pot = |f: &[f64]| energy(&FieldState::new(Boundary::Periodic, f.to_vec(), vec![0.0; 64], 1.0, 0.1).unwrap());
        let h = 1e-3;
        let shifted = |a: f64, b: f64| -> Vec<f64> { (0..64).map(|j| v[j] + a * u[j] + b * w[j]).collect() };
        let mixed = (pot(&shifted(h, h)) - pot(&shifted(h, -h)) - pot(&shifted(-h, h)) + pot(&shifted(-h, -h))) / (4.0 * h * h);
        let lu = linearized_apply(&bg, &u, t).unwrap();
        let direct = grid.integrate((0..64).map(|j| w[j] * lu[j]));
        assert!((mixed - direct).abs() < 1e-6 * direct.abs().max(1.0), "{mixed} vs {direct}");
    }

    #[test]
    fn hamiltonian_leading_term_is_energy() {
        let (_, bg) = lindstedt_bg(0.05);
        let e = expand_hamiltonian(&bg, 128, 0.0);
        let h = energy(&bg.field_state(128, 0.0).unwrap());
        assert!((e.h_minus2 - h).abs() < 1e-10);
        assert_eq!(e.linearized_mass_term.len(), 128);
        let p = fit_periodic_wave(1.0, 0.1, 2.0, 1).unwrap();
        let bg = Background::from_traveling_wave(p).unwrap();
        let e = expand_hamiltonian(&bg, 256, 0.0);
        assert!((e.h_minus2 - energy(&bg.field_state(256, 0.0).unwrap())).abs() < 1e-10);
        assert!(e.h_minus1_norm < 1e-9);
    }

    #[test]
    fn free_massless_multipliers_are_one() {
        let bg = Background::vacuum(0.0).unwrap();
        let r = monodromy(&bg, 4, 0.01).unwrap();
        assert_eq!(r.multipliers.len(), 8);
        assert!(r.multipliers.iter().all(|z| (z - 1.0).norm() < 1e-8));
        assert!(r.zero_mode_residuals.degenerate);
        assert_eq!((r.zero_mode_residuals.r_x, r.zero_mode_residuals.r_t), (0.0, 0.0));
    }

    #[test]
    fn eigenvalues_of_near_identity_rotation() {
        let a = 1e-15;
        let m = DMatrix::from_row_slice(2, 2, &[1.0, -a, a, 1.0]);
        let ev = eigenvalues(&m).unwrap();
        assert!(ev.iter().all(|z| (z - 1.0).norm() < 1e-14));
        assert_eq!(eigenvalues(&DMatrix::identity(3, 3)).unwrap().len(), 3);
    }

    #[test]
    fn massive_free_multipliers() {
        let bg = Background::vacuum(1.0).unwrap();
        let r = monodromy(&bg, 6, 0.02).unwrap();
        for k in 1..=6 {
            let w = ((k * k) as f64 + 1.0).sqrt() * 2.0 * PI;
            for sign in [-1.0, 1.0] {
                let target = Complex64::from_polar(1.0, sign * w);
                assert!(r.multipliers.iter().any(|z| (z - target).norm() < 1e-8), "k={k}");
            }
        }
    }

    #[test]
    fn lindstedt_multipliers_stay_near_unit_circle() {
        let (_, bg) = lindstedt_bg(0.01);
        let r = monodromy_matrix(&bg, 8, 0.01).unwrap();
        assert!(r.reciprocal_pairing_defect() < 1e-6);
        let far = r.multipliers.iter().map(|z| (z - 1.0).norm()).fold(0.0, f64::max);
        let (_, bg2) = lindstedt_bg(0.005);
        let r2 = monodromy_matrix(&bg2, 8, 0.01).unwrap();
        let far2 = r2.multipliers.iter().map(|z| (z - 1.0).norm()).fold(0.0, f64::max);
        assert!(far2 < far && far < 1.0, "{far} {far2}");
    }

    #[test]
    fn monodromy_is_deterministic() {
        let (_, bg) = lindstedt_bg(0.02);
        let a = monodromy_matrix(&bg, 6, 0.02).unwrap();
        let b = monodromy_matrix(&bg, 6, 0.02).unwrap();
        assert_eq!(a.monodromy, b.monodromy);
        assert_eq!(a.multipliers, b.multipliers);
    }

    #[test]
    fn monodromy_rejects_bad_step() {
        let bg = Background::vacuum(1.0).unwrap();
        assert!(matches!(monodromy(&bg, 4, 0.0), Err(Error::Stability { .. })));
        assert!(matches!(monodromy(&bg, 4, 10.0), Err(Error::Stability { .. })));
        assert!(matches!(monodromy(&bg, 0, 0.01), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn report_json_shape() {
        let bg = Background::vacuum(1.0).unwrap();
        let r = monodromy(&bg, 2, 0.05).unwrap();
        let v = r.to_json();
        let (mult, zm, n) = parse_floquet_json(&v).unwrap();
        assert_eq!(n, 2);
        assert_eq!(mult.len(), 4);
        assert_eq!(zm, [0.0, 0.0]);
    }
}
