//! Doubly-periodic standing waves of `φ_tt − φ_xx + m²φ + εφ³ = 0` by the
//! Poincaré–Lindstedt method.
//!
//! With the rescaled time `τ = ωt`, `ω = ω₀ + εω₁` and `φ = φ₀ + εφ₁`, the
//! massless (resonant) case `ω₀ = 1` gives
//!
//! ```text
//! order 0:  (∂²_τ − ∂²_x) φ₀ = 0             φ₀ = Σ a_n sin(nx) sin(nτ)
//! order 1:  (∂²_τ − ∂²_x) φ₁ = −(2ω₁ ∂²_τ φ₀ + φ₀³)
//! ```
//!
//! [`first_order_rhs`] returns `2ω₁ ∂²_τ φ₀ + φ₀³`. Its diagonal components
//! lie in the kernel of the d'Alembertian, so `φ₁` is doubly periodic only if
//! they vanish: that is the resonance system solved by
//! [`solve_resonance_system`]. The minus sign on the right of the order-1
//! equation is what the field equation produces; the diagonal (solvability)
//! conditions do not depend on it, the off-diagonal part of `φ₁` does.
//!
//! The amplitudes are truncated to a finite band. Since the cube of odd
//! harmonics contains only odd harmonics, the default band keeps the odd
//! harmonics `1, 3, …, 2N−1`; the even diagonal amplitudes vanish identically
//! on that family. Resonant components above the band cannot be removed and
//! are reported as truncation diagnostics.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jet::FieldJet;
use crate::series::{triple_product, SineSeries2D};

/// Divisor floor for the non-resonant first-order inversion.
pub const SMALL_DIVISOR_FLOOR: f64 = 1e-8;

/// Which diagonal harmonics carry unknown amplitudes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Harmonics {
    /// `a_1, a_2, …, a_N`.
    All,
    /// `a_1, a_3, …, a_{2N−1}`; even amplitudes are held at zero.
    Odd,
}

impl Harmonics {
    /// Retained harmonic indices for `n_modes` unknown amplitudes.
    pub fn indices(self, n_modes: usize) -> Vec<usize> {
        match self {
            Harmonics::All => (1..=n_modes).collect(),
            Harmonics::Odd => (0..n_modes).map(|j| 2 * j + 1).collect(),
        }
    }
}

/// How the scaling family `a → λa, ω₁ → λ²ω₁` is pinned.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Normalization {
    FixA1(f64),
    FixNorm(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResonanceProblem {
    pub n_modes: usize,
    pub normalization: Normalization,
    pub tol: f64,
    pub harmonics: Harmonics,
    pub max_iterations: usize,
}

impl ResonanceProblem {
    pub fn new(n_modes: usize, normalization: Normalization, tol: f64) -> Self {
        ResonanceProblem {
            n_modes,
            normalization,
            tol,
            harmonics: Harmonics::Odd,
            max_iterations: 100,
        }
    }

    pub fn with_harmonics(mut self, harmonics: Harmonics) -> Self {
        self.harmonics = harmonics;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.n_modes == 0 {
            return Err(Error::InvalidInput("n_modes must be >= 1".into()));
        }
        if !(self.tol > 0.0) {
            return Err(Error::InvalidInput(format!("tolerance must be > 0, got {}", self.tol)));
        }
        match self.normalization {
            Normalization::FixA1(v) | Normalization::FixNorm(v) if !v.is_finite() => {
                Err(Error::InvalidInput("normalization value must be finite".into()))
            }
            Normalization::FixNorm(v) if v < 0.0 => {
                Err(Error::InvalidInput("norm must be >= 0".into()))
            }
            _ => Ok(()),
        }
    }
}

/// Root of the banded resonance system.
#[derive(Debug, Clone, PartialEq)]
pub struct ResonanceSolution {
    /// Diagonal amplitudes `a_1..a_L`, `L` the highest retained harmonic.
    pub amplitudes: Vec<f64>,
    pub omega1: f64,
    pub iterations: usize,
    /// Max-norm of the residual over the retained harmonics.
    pub retained_residual: f64,
    /// `(n, R_n)` for resonant components above the retained band.
    pub truncation: Vec<(usize, f64)>,
}

/// `2ω₁ ∂²_τ φ₀ + φ₀³`, truncated at three times the input band.
pub fn first_order_rhs(phi0: &SineSeries2D, omega1: f64) -> SineSeries2D {
    let mut out = phi0.cube();
    for (k, l, c) in phi0.nonzero() {
        let v = out.get(k, l);
        out.set(k, l, v - 2.0 * omega1 * (l * l) as f64 * c);
    }
    out
}

/// Diagonal components `(n, n)`, `n = 1..=3N`, of [`first_order_rhs`] for the
/// diagonal field with amplitudes `a`.
pub fn resonance_residual(a: &[f64], omega1: f64) -> Vec<f64> {
    if a.is_empty() {
        return Vec::new();
    }
    first_order_rhs(&SineSeries2D::from_diagonal(a), omega1).diagonal()
}

/// Resonant components above the band `1..=a.len()`.
pub fn truncation_residuals(a: &[f64], omega1: f64) -> Vec<(usize, f64)> {
    resonance_residual(a, omega1)
        .into_iter()
        .enumerate()
        .skip(a.len())
        .map(|(i, r)| (i + 1, r))
        .filter(|(_, r)| *r != 0.0)
        .collect()
}

struct Layout {
    idx: Vec<usize>,
    len: usize,
    normalization: Normalization,
}

impl Layout {
    fn amplitudes_free(&self) -> &[usize] {
        match self.normalization {
            Normalization::FixA1(_) => &self.idx[1..],
            Normalization::FixNorm(_) => &self.idx,
        }
    }

    fn unpack(&self, z: &DVector<f64>) -> (Vec<f64>, f64) {
        let mut a = vec![0.0; self.len];
        if let Normalization::FixA1(v) = self.normalization {
            a[0] = v;
        }
        let free = self.amplitudes_free();
        for (j, &n) in free.iter().enumerate() {
            a[n - 1] = z[j];
        }
        (a, z[free.len()])
    }

    fn pack(&self, a: &[f64], omega1: f64) -> DVector<f64> {
        let free = self.amplitudes_free();
        let mut z = DVector::zeros(free.len() + 1);
        for (j, &n) in free.iter().enumerate() {
            z[j] = a[n - 1];
        }
        z[free.len()] = omega1;
        z
    }

    fn residual(&self, z: &DVector<f64>) -> DVector<f64> {
        let (a, w1) = self.unpack(z);
        let r = resonance_residual(&a, w1);
        let mut f: Vec<f64> = self.idx.iter().map(|&n| r[n - 1]).collect();
        if let Normalization::FixNorm(v) = self.normalization {
            f.push(a.iter().map(|x| x * x).sum::<f64>() - v * v);
        }
        DVector::from_vec(f)
    }

    fn jacobian(&self, z: &DVector<f64>) -> DMatrix<f64> {
        let (a, w1) = self.unpack(z);
        let phi0 = SineSeries2D::from_diagonal(&a);
        let free = self.amplitudes_free();
        let rows = self.idx.len() + usize::from(matches!(self.normalization, Normalization::FixNorm(_)));
        let mut jac = DMatrix::zeros(rows, free.len() + 1);
        let k_out = 3 * self.len;
        for (col, &j) in free.iter().enumerate() {
            let mut ej = SineSeries2D::zeros(self.len, self.len);
            ej.set(j, j, 1.0);
            let d = triple_product(&phi0, &phi0, &ej, k_out, k_out);
            for (row, &n) in self.idx.iter().enumerate() {
                let mut v = 3.0 * d.get(n, n);
                if n == j {
                    v -= 2.0 * w1 * (n * n) as f64;
                }
                jac[(row, col)] = v;
            }
            if let Normalization::FixNorm(_) = self.normalization {
                jac[(rows - 1, col)] = 2.0 * a[j - 1];
            }
        }
        let wcol = free.len();
        for (row, &n) in self.idx.iter().enumerate() {
            jac[(row, wcol)] = -2.0 * (n * n) as f64 * a[n - 1];
        }
        jac
    }
}

fn max_abs(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Damped Newton iteration for the banded resonance system.
///
/// `a_guess` holds diagonal amplitudes `a_1, a_2, …` (missing entries are
/// zero, entries outside the retained set are ignored). Converges when the
/// retained residual max-norm drops below `problem.tol`.
pub fn solve_resonance_system(
    problem: &ResonanceProblem,
    a_guess: &[f64],
    omega1_guess: f64,
) -> Result<ResonanceSolution> {
    problem.validate()?;
    if a_guess.iter().any(|x| !x.is_finite()) || !omega1_guess.is_finite() {
        return Err(Error::InvalidInput("initial guess must be finite".into()));
    }
    let idx = problem.harmonics.indices(problem.n_modes);
    let len = *idx.last().unwrap();
    let layout = Layout { idx, len, normalization: problem.normalization };

    let mut a0 = vec![0.0; len];
    for (i, &v) in a_guess.iter().take(len).enumerate() {
        a0[i] = v;
    }
    let mut z = layout.pack(&a0, omega1_guess);
    let mut f = layout.residual(&z);
    let mut norm = max_abs(&f);
    let mut iterations = 0;

    while norm >= problem.tol {
        if iterations >= problem.max_iterations {
            return Err(Error::NonConvergence { iterations, residual: norm });
        }
        iterations += 1;

        let jac = layout.jacobian(&z);
        let sv = jac.clone().singular_values();
        let smax = sv.max();
        let smin = sv.min();
        if !(smax > 0.0) || smin <= 1e-14 * smax {
            return Err(Error::SingularJacobian { iteration: iterations });
        }
        let step = jac
            .lu()
            .solve(&(-&f))
            .filter(|s| s.iter().all(|x| x.is_finite()))
            .ok_or(Error::SingularJacobian { iteration: iterations })?;

        let mut lambda = 1.0;
        let mut trial = &z + &step;
        let mut f_trial = layout.residual(&trial);
        let mut halvings = 0;
        while !(max_abs(&f_trial) < norm) && halvings < 30 {
            lambda *= 0.5;
            halvings += 1;
            trial = &z + &step * lambda;
            f_trial = layout.residual(&trial);
        }
        z = trial;
        f = f_trial;
        norm = max_abs(&f);
        if !norm.is_finite() {
            return Err(Error::NonConvergence { iterations, residual: norm });
        }
    }

    let (amplitudes, omega1) = layout.unpack(&z);
    let retained_residual = {
        let r = resonance_residual(&amplitudes, omega1);
        layout.idx.iter().fold(0.0f64, |m, &n| m.max(r[n - 1].abs()))
    };
    let truncation = truncation_residuals(&amplitudes, omega1);
    Ok(ResonanceSolution { amplitudes, omega1, iterations, retained_residual, truncation })
}

/// First-order Lindstedt solution `φ = φ₀ + εφ₁`, `ω = ω₀ + εω₁`,
/// evaluated at `τ = ωt`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LindstedtSolution {
    pub epsilon: f64,
    pub mass: f64,
    /// Frequency corrections `ω₁, ω₂, …`.
    #[serde(rename = "omega")]
    pub omega_corrections: Vec<f64>,
    pub orders: Vec<SineSeries2D>,
    /// Zero-order frequency; 1 in the resonant massless case.
    #[serde(default = "one", skip_serializing_if = "is_one")]
    pub omega0: f64,
}

fn one() -> f64 {
    1.0
}

fn is_one(x: &f64) -> bool {
    *x == 1.0
}

impl LindstedtSolution {
    /// `ω(ε) = ω₀ + Σ εⁿ ωₙ`.
    pub fn omega(&self) -> f64 {
        let mut e = 1.0;
        let mut w = self.omega0;
        for wn in &self.omega_corrections {
            e *= self.epsilon;
            w += e * wn;
        }
        w
    }

    /// Temporal period `2π/ω`.
    pub fn period(&self) -> f64 {
        2.0 * PI / self.omega()
    }

    /// `Σ εⁿ φₙ` collapsed into one series.
    pub fn total_series(&self) -> SineSeries2D {
        let mut acc: Option<SineSeries2D> = None;
        let mut e = 1.0;
        for phi in &self.orders {
            let term = phi.scaled(e);
            acc = Some(match acc {
                None => term,
                Some(s) => s.add(&term),
            });
            e *= self.epsilon;
        }
        acc.unwrap_or_else(|| SineSeries2D::zeros(1, 1))
    }

    pub fn eval(&self, x: f64, t: f64) -> f64 {
        self.total_series().eval(x, self.omega() * t)
    }

    /// Field value and analytic derivatives at `(x, t)`.
    pub fn jet(&self, x: f64, t: f64) -> FieldJet {
        series_jet(&self.total_series(), self.omega(), x, t)
    }

    /// Checks the structural invariants: positive frequency, diagonal `φ₀`
    /// and (for the resonant case) `φ₁` without diagonal content.
    pub fn validate(&self) -> Result<()> {
        if !(self.omega() > 0.0) {
            return Err(Error::InvalidInput(format!("omega = {} must be > 0", self.omega())));
        }
        if !(self.mass >= 0.0) || !self.epsilon.is_finite() {
            return Err(Error::InvalidInput("mass must be >= 0 and epsilon finite".into()));
        }
        if self.orders.is_empty() {
            return Err(Error::InvalidInput("solution has no orders".into()));
        }
        if self.omega0 == 1.0 && self.mass == 0.0 {
            if self.orders[0].nonzero().any(|(k, l, _)| k != l) {
                return Err(Error::InvalidInput("phi0 must be diagonal".into()));
            }
            if let Some(phi1) = self.orders.get(1) {
                if phi1.nonzero().any(|(k, l, _)| k == l) {
                    return Err(Error::InvalidInput("phi1 must have zero diagonal".into()));
                }
            }
        }
        Ok(())
    }
}

/// Jet of `Σ C_kl sin(kx) sin(lωt)`.
pub fn series_jet(s: &SineSeries2D, omega: f64, x: f64, t: f64) -> FieldJet {
    let tau = omega * t;
    let mut j = FieldJet::default();
    for (k, l, c) in s.nonzero() {
        let (kf, lf) = (k as f64, l as f64);
        let (sx, cx) = (kf * x).sin_cos();
        let (st, ct) = (lf * tau).sin_cos();
        let lw = lf * omega;
        j.value += c * sx * st;
        j.dx += c * kf * cx * st;
        j.dt += c * lw * sx * ct;
        j.dxx -= c * kf * kf * sx * st;
        j.dtt -= c * lw * lw * sx * st;
        j.dxt += c * kf * lw * cx * ct;
    }
    j
}

/// Assembles the resonant first-order solution from a root of the resonance
/// system. Diagonal source components within the band `1..=a.len()` must be
/// below `tol`; those above the band are truncation residuals and are dropped.
pub fn build_solution(a: &[f64], omega1: f64, epsilon: f64, tol: f64) -> Result<LindstedtSolution> {
    if a.is_empty() {
        return Err(Error::InvalidInput("no amplitudes".into()));
    }
    if a.iter().any(|x| !x.is_finite()) || !omega1.is_finite() || !epsilon.is_finite() {
        return Err(Error::InvalidInput("non-finite input".into()));
    }
    let phi0 = SineSeries2D::from_diagonal(a);
    let mut rhs = first_order_rhs(&phi0, omega1);
    let band = a.len();
    for n in 1..=rhs.kmax().min(rhs.lmax()) {
        let c = rhs.get(n, n);
        if n <= band && c.abs() > tol {
            return Err(Error::ResonantSource { k: n, l: n, value: c, tol });
        }
        rhs.set(n, n, 0.0);
    }
    let phi1 = rhs.invert_dalembert(tol)?.scaled(-1.0);
    let sol = LindstedtSolution {
        epsilon,
        mass: 0.0,
        omega_corrections: vec![omega1],
        orders: vec![phi0, phi1],
        omega0: 1.0,
    };
    sol.validate()?;
    Ok(sol)
}

/// Non-resonant single-mode solution for `m > 0`: `φ₀ = a sin(k₀x) sin(τ)`,
/// `ω₀ = Ω_{k₀} = √(k₀² + m²)`, `ω₁ = 9a²/(32ω₀)`, and `φ₁` obtained by
/// dividing `−φ₀³` by `k² + m² − l²ω₀²` off the fundamental.
pub fn build_nonresonant(mode: usize, amplitude: f64, mass: f64, epsilon: f64) -> Result<LindstedtSolution> {
    if mode == 0 || !(mass > 0.0) || !amplitude.is_finite() || !epsilon.is_finite() {
        return Err(Error::InvalidInput("non-resonant build needs mode >= 1, mass > 0, finite amplitude".into()));
    }
    let omega0 = ((mode * mode) as f64 + mass * mass).sqrt();
    let mut phi0 = SineSeries2D::zeros(mode, 1);
    phi0.set(mode, 1, amplitude);
    let omega1 = 9.0 * amplitude * amplitude / (32.0 * omega0);
    let cube = phi0.cube();
    // the (mode, 1) component of 2ω₀ω₁∂²_τφ₀ + φ₀³ vanishes by the choice of ω₁
    let phi1 = cube
        .invert_klein_gordon(mass, omega0, SMALL_DIVISOR_FLOOR, &[(mode, 1)])?
        .scaled(-1.0);
    Ok(LindstedtSolution {
        epsilon,
        mass,
        omega_corrections: vec![omega1],
        orders: vec![phi0, phi1],
        omega0,
    })
}

/// Max-norm of `φ_tt − φ_xx + m²φ + εφ³` over the `grid_n × grid_n` grid
/// `x_i = 2πi/n`, `t_j = (2π/ω) j/n`, with analytic derivatives.
pub fn pde_residual(sol: &LindstedtSolution, grid_n: usize) -> Result<f64> {
    if grid_n < 16 {
        return Err(Error::InvalidInput(format!("grid_n must be >= 16, got {grid_n}")));
    }
    let s = sol.total_series();
    let omega = sol.omega();
    let m2 = sol.mass * sol.mass;
    let (kmax, lmax) = (s.kmax(), s.lmax());
    let h = 2.0 * PI / grid_n as f64;

    // linear part coefficients (k² + m² − ω²l²) C_kl
    let mut lin = s.clone();
    for (k, l, c) in s.nonzero() {
        lin.set(k, l, c * ((k * k) as f64 + m2 - omega * omega * (l * l) as f64));
    }

    let sin_table = |n: usize| -> Vec<Vec<f64>> {
        (0..grid_n)
            .map(|i| (1..=n).map(|k| (k as f64 * i as f64 * h).sin()).collect())
            .collect()
    };
    let sx = sin_table(kmax);
    let st = sin_table(lmax);

    let mut worst = 0.0f64;
    for row_x in &sx {
        // contract over k first: u_l = Σ_k C_kl sin(kx)
        let mut u = vec![0.0; lmax];
        let mut ul = vec![0.0; lmax];
        for k in 1..=kmax {
            let s_k = row_x[k - 1];
            for l in 1..=lmax {
                u[l - 1] += s.get(k, l) * s_k;
                ul[l - 1] += lin.get(k, l) * s_k;
            }
        }
        for row_t in &st {
            let mut phi = 0.0;
            let mut linear = 0.0;
            for l in 0..lmax {
                phi += u[l] * row_t[l];
                linear += ul[l] * row_t[l];
            }
            let r = linear + sol.epsilon * phi * phi * phi;
            worst = worst.max(r.abs());
        }
    }
    Ok(worst)
}
