//! Truncated double sine series `Σ C_kl sin(kx) sin(lτ)` on `[0,2π] × [0,2π]`.
//!
//! All algebra here is exact within the truncation: products of sines are
//! expanded with the product-to-sum identities, never sampled.
//!
//! # Sign convention
//!
//! [`SineSeries2D::dalembert_apply`] is the operator `∂²_τ − ∂²_x`. Acting on
//! `sin(kx) sin(lτ)` it multiplies the coefficient by `k² − l²`, so the
//! diagonal `k = l` is its kernel. [`SineSeries2D::invert_dalembert`] divides
//! by the same factor, which makes `dalembert_apply ∘ invert_dalembert` the
//! identity on every series with vanishing diagonal.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest supported truncation in either index.
pub const MAX_MODES: usize = 512;

/// Dense truncated double sine series. Coefficients are stored row-major,
/// `C_kl` at `(k - 1) * lmax + (l - 1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSeries", into = "RawSeries")]
pub struct SineSeries2D {
    kmax: usize,
    lmax: usize,
    coeffs: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawSeries {
    kmax: usize,
    lmax: usize,
    coeffs: Vec<f64>,
}

impl TryFrom<RawSeries> for SineSeries2D {
    type Error = Error;

    fn try_from(raw: RawSeries) -> Result<Self> {
        SineSeries2D::from_coeffs(raw.kmax, raw.lmax, raw.coeffs)
    }
}

impl From<SineSeries2D> for RawSeries {
    fn from(s: SineSeries2D) -> Self {
        RawSeries { kmax: s.kmax, lmax: s.lmax, coeffs: s.coeffs }
    }
}

fn check_shape(kmax: usize, lmax: usize) -> Result<()> {
    if kmax == 0 || lmax == 0 || kmax > MAX_MODES || lmax > MAX_MODES {
        return Err(Error::InvalidInput(format!(
            "series truncation ({kmax},{lmax}) outside 1..={MAX_MODES}"
        )));
    }
    Ok(())
}

impl SineSeries2D {
    /// Zero series with the given truncation.
    ///
    /// Panics if either dimension is zero or exceeds [`MAX_MODES`].
    pub fn zeros(kmax: usize, lmax: usize) -> Self {
        check_shape(kmax, lmax).expect("invalid series truncation");
        SineSeries2D { kmax, lmax, coeffs: vec![0.0; kmax * lmax] }
    }

    pub fn from_coeffs(kmax: usize, lmax: usize, coeffs: Vec<f64>) -> Result<Self> {
        check_shape(kmax, lmax)?;
        if coeffs.len() != kmax * lmax {
            return Err(Error::DimensionMismatch { expected: kmax * lmax, found: coeffs.len() });
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidInput("non-finite series coefficient".into()));
        }
        Ok(SineSeries2D { kmax, lmax, coeffs })
    }

    /// Diagonal series `Σ a_n sin(nx) sin(nτ)` with `a[n-1] = a_n`.
    pub fn from_diagonal(amplitudes: &[f64]) -> Self {
        let n = amplitudes.len().max(1);
        let mut s = SineSeries2D::zeros(n, n);
        for (i, &a) in amplitudes.iter().enumerate() {
            s.set(i + 1, i + 1, a);
        }
        s
    }

    pub fn kmax(&self) -> usize {
        self.kmax
    }

    pub fn lmax(&self) -> usize {
        self.lmax
    }

    /// Row-major coefficient slice.
    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    #[inline]
    fn index(&self, k: usize, l: usize) -> usize {
        (k - 1) * self.lmax + (l - 1)
    }

    /// Coefficient `C_kl`; zero outside the truncation.
    pub fn get(&self, k: usize, l: usize) -> f64 {
        if k == 0 || l == 0 || k > self.kmax || l > self.lmax {
            0.0
        } else {
            self.coeffs[self.index(k, l)]
        }
    }

    /// Sets `C_kl`. Panics outside the truncation.
    pub fn set(&mut self, k: usize, l: usize, value: f64) {
        assert!(k >= 1 && l >= 1 && k <= self.kmax && l <= self.lmax, "mode ({k},{l}) out of range");
        let i = self.index(k, l);
        self.coeffs[i] = value;
    }

    /// Iterates `(k, l, C_kl)` over nonzero coefficients.
    pub fn nonzero(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        let lmax = self.lmax;
        self.coeffs
            .iter()
            .enumerate()
            .filter(|(_, c)| **c != 0.0)
            .map(move |(i, &c)| (i / lmax + 1, i % lmax + 1, c))
    }

    /// Diagonal coefficients `C_nn` for `n = 1..=min(kmax, lmax)`.
    pub fn diagonal(&self) -> Vec<f64> {
        (1..=self.kmax.min(self.lmax)).map(|n| self.get(n, n)).collect()
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|&c| c == 0.0)
    }

    /// Copy with a new truncation; modes outside it are dropped, new ones are zero.
    pub fn resized(&self, kmax: usize, lmax: usize) -> Self {
        let mut out = SineSeries2D::zeros(kmax, lmax);
        for (k, l, c) in self.nonzero() {
            if k <= kmax && l <= lmax {
                out.set(k, l, c);
            }
        }
        out
    }

    pub fn scaled(&self, factor: f64) -> Self {
        SineSeries2D {
            kmax: self.kmax,
            lmax: self.lmax,
            coeffs: self.coeffs.iter().map(|c| c * factor).collect(),
        }
    }

    /// Sum of two series on the union of their truncations.
    pub fn add(&self, other: &SineSeries2D) -> Self {
        let mut out = self.resized(self.kmax.max(other.kmax), self.lmax.max(other.lmax));
        for (k, l, c) in other.nonzero() {
            let v = out.get(k, l);
            out.set(k, l, v + c);
        }
        out
    }

    /// Largest coefficient magnitude.
    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, c| m.max(c.abs()))
    }

    /// `Σ C_kl sin(kx) sin(lτ)`.
    pub fn eval(&self, x: f64, tau: f64) -> f64 {
        let sx: Vec<f64> = (1..=self.kmax).map(|k| (k as f64 * x).sin()).collect();
        let st: Vec<f64> = (1..=self.lmax).map(|l| (l as f64 * tau).sin()).collect();
        let mut acc = 0.0;
        for (row, s) in self.coeffs.chunks_exact(self.lmax).zip(&sx) {
            let inner: f64 = row.iter().zip(&st).map(|(c, t)| c * t).sum();
            acc += s * inner;
        }
        acc
    }

    /// Sine-sine coefficients of the pointwise cube, truncated to `(k_out, l_out)`.
    /// Exact for every retained mode.
    pub fn cube_project(&self, k_out: usize, l_out: usize) -> SineSeries2D {
        triple_product(self, self, self, k_out, l_out)
    }

    /// Cube with the default output truncation of three times the input.
    pub fn cube(&self) -> SineSeries2D {
        self.cube_project((3 * self.kmax).min(MAX_MODES), (3 * self.lmax).min(MAX_MODES))
    }

    /// Applies `∂²_τ − ∂²_x`: `C_kl ↦ (k² − l²) C_kl`.
    pub fn dalembert_apply(&self) -> SineSeries2D {
        let mut out = self.clone();
        for k in 1..=self.kmax {
            for l in 1..=self.lmax {
                let i = out.index(k, l);
                out.coeffs[i] *= (k * k) as f64 - (l * l) as f64;
            }
        }
        out
    }

    /// Inverse of [`dalembert_apply`](Self::dalembert_apply) off the diagonal.
    ///
    /// Fails with [`Error::ResonantSource`] if any diagonal coefficient exceeds
    /// `tol`; such a source would force a secular term.
    pub fn invert_dalembert(&self, tol: f64) -> Result<SineSeries2D> {
        let mut out = SineSeries2D::zeros(self.kmax, self.lmax);
        for (k, l, c) in self.nonzero() {
            if k == l {
                if c.abs() > tol {
                    return Err(Error::ResonantSource { k, l, value: c, tol });
                }
                continue;
            }
            out.set(k, l, c / ((k * k) as f64 - (l * l) as f64));
        }
        Ok(out)
    }

    /// Inverse of `ω₀²∂²_τ − ∂²_x + m²`, i.e. division by `k² + m² − l²ω₀²`,
    /// skipping the listed resonant modes (which must be handled by the caller).
    /// Divisors smaller than `floor` raise [`Error::SmallDivisor`].
    pub fn invert_klein_gordon(
        &self,
        mass: f64,
        omega0: f64,
        floor: f64,
        skip: &[(usize, usize)],
    ) -> Result<SineSeries2D> {
        let mut out = SineSeries2D::zeros(self.kmax, self.lmax);
        for (k, l, c) in self.nonzero() {
            if skip.contains(&(k, l)) {
                continue;
            }
            let d = (k * k) as f64 + mass * mass - (l * l) as f64 * omega0 * omega0;
            if d.abs() < floor {
                return Err(Error::SmallDivisor { k, l, value: d });
            }
            out.set(k, l, c / d);
        }
        Ok(out)
    }
}

/// Free Klein–Gordon frequencies `Ω_l = √(l² + m²)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearSpectrum {
    mass: f64,
    frequencies: Vec<f64>,
}

impl LinearSpectrum {
    pub fn new(mass: f64, lmax: usize) -> Result<Self> {
        if !(mass >= 0.0 && mass.is_finite()) {
            return Err(Error::Domain(format!("mass must be finite and >= 0, got {mass}")));
        }
        let frequencies = (1..=lmax).map(|l| ((l * l) as f64 + mass * mass).sqrt()).collect();
        Ok(LinearSpectrum { mass, frequencies })
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    /// `Ω_l` for `l = 1..=lmax`, index `l - 1`.
    pub fn frequencies(&self) -> &[f64] {
        &self.frequencies
    }

    pub fn omega(&self, l: usize) -> f64 {
        self.frequencies[l - 1]
    }
}

// sin(i·s) sin(j·s) = ½ cos((i−j)s) − ½ cos((i+j)s)
#[inline]
fn sin_sin(i: usize, j: usize) -> [(usize, f64); 2] {
    [(i.abs_diff(j), 0.5), (i + j, -0.5)]
}

// cos(p·s) sin(k·s) = ½ sin((k+p)s) + ½ sin((k−p)s); sin of a negative index flips sign.
#[inline]
fn cos_sin(p: usize, k: usize) -> [(usize, f64); 2] {
    let second = if k >= p { (k - p, 0.5) } else { (p - k, -0.5) };
    [(k + p, 0.5), second]
}

/// Sine-sine coefficients of the pointwise product `a · b · c`, truncated to
/// `(k_out, l_out)`.
pub fn triple_product(
    a: &SineSeries2D,
    b: &SineSeries2D,
    c: &SineSeries2D,
    k_out: usize,
    l_out: usize,
) -> SineSeries2D {
    let mut out = SineSeries2D::zeros(k_out, l_out);
    let an: Vec<_> = a.nonzero().collect();
    let bn: Vec<_> = b.nonzero().collect();
    let cn: Vec<_> = c.nonzero().collect();
    if an.is_empty() || bn.is_empty() || cn.is_empty() {
        return out;
    }

    // a·b as a cosine-cosine series with indices 0..=pk, 0..=pl.
    let pk = a.kmax + b.kmax;
    let pl = a.lmax + b.lmax;
    let mut prod = vec![0.0; (pk + 1) * (pl + 1)];
    for &(ka, la, ca) in &an {
        for &(kb, lb, cb) in &bn {
            let w = ca * cb;
            for (p, wx) in sin_sin(ka, kb) {
                for (q, wt) in sin_sin(la, lb) {
                    prod[p * (pl + 1) + q] += w * wx * wt;
                }
            }
        }
    }

    for p in 0..=pk {
        for q in 0..=pl {
            let w = prod[p * (pl + 1) + q];
            if w == 0.0 {
                continue;
            }
            for &(kc, lc, cc) in &cn {
                for (k, wx) in cos_sin(p, kc) {
                    if k == 0 || k > k_out {
                        continue;
                    }
                    for (l, wt) in cos_sin(q, lc) {
                        if l == 0 || l > l_out {
                            continue;
                        }
                        let i = out.index(k, l);
                        out.coeffs[i] += w * cc * wx * wt;
                    }
                }
            }
        }
    }
    out
}
