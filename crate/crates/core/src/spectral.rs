//! Fourier machinery on `[0, 2π)` with `n` samples `x_j = 2πj/n`.
//!
//! Periodic data are transformed directly. Dirichlet data (`φ(0) = φ(2π) = 0`)
//! are extended oddly to a `4π`-periodic signal of length `2n`, which is the
//! discrete sine transform expressed through a complex FFT; the admissible
//! wavenumbers are then the half-integers `q/2`.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    DirichletSine,
    Periodic,
}

#[derive(Clone)]
pub struct SpectralGrid {
    n: usize,
    boundary: Boundary,
    ext_len: usize,
    wavenumbers: Vec<f64>,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for SpectralGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SpectralGrid").field("n", &self.n).field("boundary", &self.boundary).finish()
    }
}

impl SpectralGrid {
    pub fn new(n: usize, boundary: Boundary) -> Result<Self> {
        if n < 4 {
            return Err(Error::InvalidInput(format!("grid needs at least 4 points, got {n}")));
        }
        let (ext_len, base) = match boundary {
            Boundary::Periodic => (n, 1.0),
            Boundary::DirichletSine => (2 * n, 0.5),
        };
        let wavenumbers = (0..ext_len)
            .map(|q| {
                let s = if 2 * q <= ext_len { q as f64 } else { q as f64 - ext_len as f64 };
                base * s
            })
            .collect();
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(ext_len);
        let inv = planner.plan_fft_inverse(ext_len);
        Ok(SpectralGrid { n, boundary, ext_len, wavenumbers, fwd, inv })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    pub fn dx(&self) -> f64 {
        2.0 * PI / self.n as f64
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n).map(|j| j as f64 * self.dx()).collect()
    }

    fn is_nyquist(&self, q: usize) -> bool {
        self.ext_len.is_multiple_of(2) && q == self.ext_len / 2
    }

    fn extend(&self, f: &[Complex64]) -> Vec<Complex64> {
        debug_assert_eq!(f.len(), self.n);
        match self.boundary {
            Boundary::Periodic => f.to_vec(),
            Boundary::DirichletSine => {
                let mut e = vec![Complex64::new(0.0, 0.0); self.ext_len];
                for j in 1..self.n {
                    e[j] = f[j];
                    e[self.ext_len - j] = -f[j];
                }
                e
            }
        }
    }

    fn spectrum(&self, f: &[Complex64]) -> Vec<Complex64> {
        let mut e = self.extend(f);
        self.fwd.process(&mut e);
        e
    }

    fn physical(&self, mut spec: Vec<Complex64>) -> Vec<Complex64> {
        self.inv.process(&mut spec);
        let scale = 1.0 / self.ext_len as f64;
        spec.truncate(self.n);
        for z in spec.iter_mut() {
            *z *= scale;
        }
        if self.boundary == Boundary::DirichletSine {
            spec[0] = Complex64::new(0.0, 0.0);
        }
        spec
    }

    fn to_complex(f: &[f64]) -> Vec<Complex64> {
        f.iter().map(|&x| Complex64::new(x, 0.0)).collect()
    }

    /// Spectral derivative of complex samples. For Dirichlet data the result is
    /// the (even) derivative of the odd extension restricted to `[0, 2π)`.
    pub fn derivative_complex(&self, f: &[Complex64]) -> Vec<Complex64> {
        let mut spec = self.spectrum(f);
        for (q, z) in spec.iter_mut().enumerate() {
            *z = if self.is_nyquist(q) {
                Complex64::new(0.0, 0.0)
            } else {
                *z * Complex64::new(0.0, self.wavenumbers[q])
            };
        }
        let mut out = self.extend_free_physical(spec);
        out.truncate(self.n);
        out
    }

    // inverse transform without re-imposing the Dirichlet zero at x = 0
    fn extend_free_physical(&self, mut spec: Vec<Complex64>) -> Vec<Complex64> {
        self.inv.process(&mut spec);
        let scale = 1.0 / self.ext_len as f64;
        spec.iter().map(|z| z * scale).collect()
    }

    pub fn derivative(&self, f: &[f64]) -> Vec<f64> {
        self.derivative_complex(&Self::to_complex(f)).into_iter().map(|z| z.re).collect()
    }

    pub fn second_derivative(&self, f: &[f64]) -> Vec<f64> {
        let mut spec = self.spectrum(&Self::to_complex(f));
        for (q, z) in spec.iter_mut().enumerate() {
            *z *= -self.wavenumbers[q] * self.wavenumbers[q];
        }
        self.physical(spec).into_iter().map(|z| z.re).collect()
    }

    /// Exact flow of `u_tt = u_xx − m²u` over `dt`, mode by mode.
    pub fn propagate_free_complex(&self, u: &mut [Complex64], u_t: &mut [Complex64], mass: f64, dt: f64) {
        let mut a = self.spectrum(u);
        let mut b = self.spectrum(u_t);
        for q in 0..self.ext_len {
            let kappa = self.wavenumbers[q];
            let w = (kappa * kappa + mass * mass).sqrt();
            let (c, s, s_over_w) = if w == 0.0 {
                (1.0, 0.0, dt)
            } else {
                let (s, c) = (w * dt).sin_cos();
                (c, s, s / w)
            };
            let (x, y) = (a[q], b[q]);
            a[q] = x * c + y * s_over_w;
            b[q] = -x * (w * s) + y * c;
        }
        u.copy_from_slice(&self.physical(a));
        u_t.copy_from_slice(&self.physical(b));
    }

    pub fn propagate_free(&self, u: &mut [f64], u_t: &mut [f64], mass: f64, dt: f64) {
        let mut a = Self::to_complex(u);
        let mut b = Self::to_complex(u_t);
        self.propagate_free_complex(&mut a, &mut b, mass, dt);
        for (dst, z) in u.iter_mut().zip(&a) {
            *dst = z.re;
        }
        for (dst, z) in u_t.iter_mut().zip(&b) {
            *dst = z.re;
        }
    }

    /// Trapezoid rule over `[0, 2π]`; the endpoint sample equals the first
    /// (periodic) or vanishes (Dirichlet), so this is `Δx Σ f_j`.
    pub fn integrate(&self, f: impl IntoIterator<Item = f64>) -> f64 {
        self.dx() * f.into_iter().sum::<f64>()
    }
}
