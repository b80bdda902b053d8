//! Traveling waves `φ(x − vt)` of the φ⁴ Klein–Gordon equation.
//!
//! Substituting `φ(ξ)`, `ξ = x − vt` gives the Duffing equation
//!
//! ```text
//! (v² − 1) φ'' + m² φ + ε φ³ = 0,   i.e.   φ'' + α φ + γ φ³ = 0
//! α = m²/(v² − 1),   γ = ε/(v² − 1)
//! ```
//!
//! With `u = βξ` and modulus `k` (not the parameter `k²`), the Jacobi
//! functions satisfy
//!
//! ```text
//! cn'' = (2k² − 1) cn − 2k² cn³
//! sn'' = −(1 + k²) sn + 2k² sn³
//! ```
//!
//! Matching the linear and cubic coefficients of `φ = A cn(βξ, k)` gives
//! `β²(1 − 2k²) = α` and `A² = 2β²k²/γ` (needs `γ > 0`); for
//! `φ = A sn(βξ, k)` it gives `β²(1 + k²) = α` and `A² = −2β²k²/γ` (needs
//! `γ < 0`). Spatial period `2π/n` fixes `β = 2nK(k)/π`, since both cn and sn
//! have period `4K(k)`. What remains is one scalar equation in `k`, solved by
//! bisection:
//!
//! | regime                       | form | equation                      | admissible `k`  |
//! |------------------------------|------|-------------------------------|-----------------|
//! | `γ > 0`, `v² > 1` (`α ≥ 0`)  | cn   | `β²(1 − 2k²) = α`, `α ≤ n²`   | `[0, 1/√2]`     |
//! | `γ > 0`, `v² < 1` (`α ≤ 0`)  | cn   | `β²(2k² − 1) = −α`            | `[1/√2, 1)`     |
//! | `γ < 0`, `v² > 1` (`α > 0`)  | sn   | `β²(1 + k²) = α`, `α ≥ n²`    | `[0, 1)`        |
//!
//! Any other sign combination has no real periodic orbit around `φ = 0`.
//! As `ε → 0` the orbit closes only at `k → 0`, `α → n²`, i.e. on the
//! linear dispersion relation `v = √(n² + m²)/n`.
//!
//! Traveling waves live on the periodic domain `[0, 2π)`; the standing-wave
//! modules use the Dirichlet sine basis instead.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jet::FieldJet;

const AGM_MAX_ITER: usize = 64;

fn check_modulus(k: f64) -> Result<()> {
    if !(0.0..1.0).contains(&k) {
        return Err(Error::Domain(format!("elliptic modulus must lie in [0,1), got {k}")));
    }
    Ok(())
}

/// Complete elliptic integral of the first kind `K(k)` for modulus `k`,
/// `π / (2 AGM(1, √(1 − k²)))`.
pub fn elliptic_k(k: f64) -> Result<f64> {
    check_modulus(k)?;
    let mut a = 1.0f64;
    let mut b = (1.0 - k * k).sqrt();
    for _ in 0..AGM_MAX_ITER {
        if (a - b).abs() <= 1e-16 * a {
            break;
        }
        let an = 0.5 * (a + b);
        b = (a * b).sqrt();
        a = an;
    }
    Ok(PI / (2.0 * a))
}

/// Jacobi elliptic functions `(cn, sn, dn)` of `u` for modulus `k`, by the
/// descending Landen (AGM) scheme.
pub fn jacobi_cn_sn_dn(u: f64, k: f64) -> Result<(f64, f64, f64)> {
    check_modulus(k)?;
    if k == 0.0 {
        let (s, c) = u.sin_cos();
        return Ok((c, s, 1.0));
    }
    let mut a = vec![1.0f64];
    let mut c = vec![k];
    let mut b = (1.0 - k * k).sqrt();
    while c.last().unwrap().abs() > 1e-16 && a.len() < AGM_MAX_ITER {
        let an = *a.last().unwrap();
        let a_next = 0.5 * (an + b);
        let c_next = 0.5 * (an - b);
        b = (an * b).sqrt();
        a.push(a_next);
        c.push(c_next);
    }
    let n = a.len() - 1;
    let mut phi = (1u64 << n) as f64 * a[n] * u;
    for i in (1..=n).rev() {
        phi = 0.5 * (phi + (c[i] / a[i] * phi.sin()).asin());
    }
    let (sn, cn) = phi.sin_cos();
    let dn = (1.0 - k * k * sn * sn).sqrt();
    Ok((cn, sn, dn))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WaveForm {
    Cn,
    Sn,
}

/// `φ(x, t) = A·cn(β(x − vt), k)` (or sn) with spatial period `2π/n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TravelingWaveProfile {
    #[serde(rename = "v")]
    pub velocity: f64,
    #[serde(rename = "m")]
    pub mass: f64,
    pub epsilon: f64,
    #[serde(rename = "n")]
    pub harmonic: usize,
    #[serde(rename = "A")]
    pub amplitude: f64,
    #[serde(rename = "k")]
    pub modulus: f64,
    #[serde(rename = "beta")]
    pub scale: f64,
    /// Derived from the sign regime when absent.
    #[serde(default, skip_serializing)]
    pub form: Option<WaveForm>,
}

impl TravelingWaveProfile {
    /// The ansatz form: cn when `ε/(v² − 1) > 0`, sn otherwise.
    pub fn form(&self) -> WaveForm {
        self.form.unwrap_or_else(|| {
            if self.epsilon / (self.velocity * self.velocity - 1.0) >= 0.0 {
                WaveForm::Cn
            } else {
                WaveForm::Sn
            }
        })
    }

    /// Spatial period `4K(k)/β`.
    pub fn spatial_period(&self) -> f64 {
        4.0 * elliptic_k(self.modulus).unwrap_or(f64::NAN) / self.scale
    }

    /// Temporal period `2π/(n|v|)` of the field at a fixed point.
    pub fn temporal_period(&self) -> f64 {
        2.0 * PI / (self.harmonic as f64 * self.velocity.abs())
    }

    /// `φ(ξ)` and its first two `ξ`-derivatives.
    pub fn profile_derivs(&self, xi: f64) -> (f64, f64, f64) {
        let (a, b, k) = (self.amplitude, self.scale, self.modulus);
        let (cn, sn, dn) = jacobi_cn_sn_dn(b * xi, k).expect("profile modulus validated");
        let k2 = k * k;
        match self.form() {
            WaveForm::Cn => (
                a * cn,
                -a * b * sn * dn,
                a * b * b * ((2.0 * k2 - 1.0) * cn - 2.0 * k2 * cn * cn * cn),
            ),
            WaveForm::Sn => (
                a * sn,
                a * b * cn * dn,
                a * b * b * (-(1.0 + k2) * sn + 2.0 * k2 * sn * sn * sn),
            ),
        }
    }

    /// Field value and derivatives at `(x, t)`.
    pub fn jet(&self, x: f64, t: f64) -> FieldJet {
        let v = self.velocity;
        let (p, p1, p2) = self.profile_derivs(x - v * t);
        FieldJet { value: p, dx: p1, dt: -v * p1, dxx: p2, dtt: v * v * p2, dxt: -v * p2 }
    }

    /// Max-norm of `(v² − 1)φ'' + m²φ + εφ³` at `points` collocation points
    /// over one spatial period.
    pub fn ode_residual(&self, points: usize) -> f64 {
        let period = self.spatial_period();
        let c = self.velocity * self.velocity - 1.0;
        (0..points)
            .map(|i| {
                let xi = period * i as f64 / points as f64;
                let (p, _, p2) = self.profile_derivs(xi);
                (c * p2 + self.mass * self.mass * p + self.epsilon * p * p * p).abs()
            })
            .fold(0.0, f64::max)
    }
}

/// Evaluates the profile at `ξ = x − vt`.
pub fn profile_eval(p: &TravelingWaveProfile, x: f64, t: f64) -> f64 {
    p.profile_derivs(x - p.velocity * t).0
}

fn beta_for(k: f64, harmonic: usize) -> f64 {
    2.0 * harmonic as f64 * elliptic_k(k).unwrap_or(f64::INFINITY) / PI
}

/// Bisection for a sign change of `f` on `[lo, hi]`; returns the endpoint
/// with the smaller residual once the bracket stops shrinking.
fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let mut flo = f(lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return mid;
        }
        if (fm > 0.0) == (flo > 0.0) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    if f(lo).abs() <= f(hi).abs() {
        lo
    } else {
        hi
    }
}

fn check_common(mass: f64, epsilon: f64, harmonic: usize) -> Result<()> {
    if !(mass >= 0.0 && mass.is_finite()) || !epsilon.is_finite() {
        return Err(Error::InvalidInput("mass must be finite and >= 0, epsilon finite".into()));
    }
    if harmonic == 0 {
        return Err(Error::InvalidInput("harmonic must be >= 1".into()));
    }
    Ok(())
}

/// Periodic traveling wave of spatial period `2π/harmonic` moving at `velocity`.
pub fn fit_periodic_wave(mass: f64, epsilon: f64, velocity: f64, harmonic: usize) -> Result<TravelingWaveProfile> {
    check_common(mass, epsilon, harmonic)?;
    if !velocity.is_finite() {
        return Err(Error::InvalidInput("velocity must be finite".into()));
    }
    let c = velocity * velocity - 1.0;
    if c.abs() < 1e-14 {
        return Err(Error::LightCone);
    }
    if epsilon == 0.0 {
        return Err(Error::NoPeriodicOrbit("linear field: amplitude undetermined by velocity".into()));
    }
    let alpha = mass * mass / c;
    let gamma = epsilon / c;
    let n2 = (harmonic * harmonic) as f64;
    let beta2 = |k: f64| beta_for(k, harmonic).powi(2);
    let k_top = 1.0 - 1e-15;

    let (form, k) = if gamma > 0.0 && c > 0.0 {
        if alpha > n2 {
            return Err(Error::NoPeriodicOrbit(format!(
                "velocity below the linear dispersion value {:.6}",
                (n2 + mass * mass).sqrt() / harmonic as f64
            )));
        }
        let k = if alpha == 0.0 {
            FRAC_1_SQRT_2
        } else {
            bisect(|k| beta2(k) * (1.0 - 2.0 * k * k) - alpha, 0.0, FRAC_1_SQRT_2)
        };
        (WaveForm::Cn, k)
    } else if gamma > 0.0 {
        // c < 0, alpha <= 0
        let k = if alpha == 0.0 {
            FRAC_1_SQRT_2
        } else {
            bisect(|k| beta2(k) * (2.0 * k * k - 1.0) + alpha, FRAC_1_SQRT_2, k_top)
        };
        (WaveForm::Cn, k)
    } else if c > 0.0 {
        // gamma < 0
        if alpha < n2 {
            return Err(Error::NoPeriodicOrbit(format!(
                "velocity above the linear dispersion value {:.6} for defocusing sign",
                (n2 + mass * mass).sqrt() / harmonic as f64
            )));
        }
        (WaveForm::Sn, bisect(|k| beta2(k) * (1.0 + k * k) - alpha, 0.0, k_top))
    } else {
        return Err(Error::NoPeriodicOrbit(
            "inverted potential: ε and v² − 1 of opposite sign with v² < 1".into(),
        ));
    };

    if !(k < 1.0) {
        return Err(Error::NoPeriodicOrbit("modulus reached 1 (separatrix)".into()));
    }
    let beta = beta_for(k, harmonic);
    let amplitude = (2.0 * beta * beta * k * k / gamma.abs()).sqrt();
    Ok(TravelingWaveProfile {
        velocity,
        mass,
        epsilon,
        harmonic,
        amplitude,
        modulus: k,
        scale: beta,
        form: Some(form),
    })
}

/// Periodic traveling wave with prescribed amplitude; the velocity follows
/// in closed form from the same ansatz relations (positive root).
///
/// cn: `k² = εA²/(2(m² + εA²))`, `v² − 1 = (m² + εA²)/β²`;
/// sn: `k² = −εA²/(2m² + εA²)`, `v² − 1 = (m² + εA²/2)/β²`.
pub fn fit_wave_with_amplitude(mass: f64, epsilon: f64, amplitude: f64, harmonic: usize) -> Result<TravelingWaveProfile> {
    check_common(mass, epsilon, harmonic)?;
    if !(amplitude > 0.0 && amplitude.is_finite()) {
        return Err(Error::InvalidInput("amplitude must be finite and > 0".into()));
    }
    let m2 = mass * mass;
    let ea2 = epsilon * amplitude * amplitude;
    let (form, k2, numerator) = if epsilon >= 0.0 || -ea2 > m2 {
        (WaveForm::Cn, ea2 / (2.0 * (m2 + ea2)), m2 + ea2)
    } else {
        (WaveForm::Sn, -ea2 / (2.0 * m2 + ea2), m2 + 0.5 * ea2)
    };
    if !(0.0..1.0).contains(&k2) || !k2.is_finite() {
        return Err(Error::NoPeriodicOrbit(format!("amplitude {amplitude} beyond the separatrix")));
    }
    let k = k2.sqrt();
    let beta = beta_for(k, harmonic);
    let c = numerator / (beta * beta);
    if !(1.0 + c > 0.0) {
        return Err(Error::NoPeriodicOrbit("imaginary velocity".into()));
    }
    if c.abs() < 1e-14 {
        return Err(Error::LightCone);
    }
    Ok(TravelingWaveProfile {
        velocity: (1.0 + c).sqrt(),
        mass,
        epsilon,
        harmonic,
        amplitude,
        modulus: k,
        scale: beta,
        form: Some(form),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Independent AGM oracle for K with the parameter convention `m = k²`.
    fn k_oracle(m: f64) -> f64 {
        let (mut a, mut g) = (1.0f64, (1.0 - m).sqrt());
        while (a - g).abs() > 1e-17 {
            let t = (a + g) / 2.0;
            g = (a * g).sqrt();
            a = t;
        }
        PI / (a + g)
    }

    #[test]
    fn complete_integral_values() {
        assert!((elliptic_k(0.0).unwrap() - PI / 2.0).abs() < 1e-15);
        let k05 = elliptic_k(0.5).unwrap();
        assert!((k05 - 1.685_750_354_812_596).abs() < 1e-14);
        assert!((k05 - k_oracle(0.25)).abs() < 1e-14);
        assert!(elliptic_k(0.9).unwrap() > k05);
        assert!(matches!(elliptic_k(1.0), Err(Error::Domain(_))));
        assert!(matches!(elliptic_k(-0.1), Err(Error::Domain(_))));
    }

    #[test]
    fn jacobi_special_values() {
        let (cn, sn, dn) = jacobi_cn_sn_dn(0.0, 0.7).unwrap();
        assert_eq!((cn, sn, dn), (1.0, 0.0, 1.0));
        let kq = elliptic_k(0.5).unwrap();
        let (cn, sn, _) = jacobi_cn_sn_dn(kq, 0.5).unwrap();
        assert!((sn - 1.0).abs() < 1e-12 && cn.abs() < 1e-12);
        for &u in &[0.3, 1.2, 2.5] {
            let (cn, sn, dn) = jacobi_cn_sn_dn(u, 0.0).unwrap();
            assert!((cn - u.cos()).abs() < 1e-15 && (sn - u.sin()).abs() < 1e-15 && dn == 1.0);
        }
        assert!(jacobi_cn_sn_dn(0.1, 1.0).is_err());
    }

    #[test]
    fn jacobi_against_ode_integration() {
        // sn' = cn dn, cn' = −sn dn, dn' = −k² sn cn; RK4 oracle.
        let k: f64 = 0.8;
        let k2 = k * k;
        let f = |y: [f64; 3]| [y[1] * y[2], -y[0] * y[2], -k2 * y[0] * y[1]];
        let mut y = [0.0, 1.0, 1.0];
        let h = 1e-4;
        let steps = 25_000;
        for _ in 0..steps {
            let add = |a: [f64; 3], b: [f64; 3], s: f64| [a[0] + s * b[0], a[1] + s * b[1], a[2] + s * b[2]];
            let k1 = f(y);
            let k2v = f(add(y, k1, h / 2.0));
            let k3 = f(add(y, k2v, h / 2.0));
            let k4 = f(add(y, k3, h));
            for i in 0..3 {
                y[i] += h / 6.0 * (k1[i] + 2.0 * k2v[i] + 2.0 * k3[i] + k4[i]);
            }
        }
        let (cn, sn, dn) = jacobi_cn_sn_dn(h * steps as f64, k).unwrap();
        assert!((sn - y[0]).abs() < 1e-12, "{sn} vs {}", y[0]);
        assert!((cn - y[1]).abs() < 1e-12);
        assert!((dn - y[2]).abs() < 1e-12);
    }

    #[test]
    fn fit_example_residual() {
        let p = fit_periodic_wave(1.0, 0.1, 2.0, 1).unwrap();
        assert_eq!(p.form(), WaveForm::Cn);
        assert!(p.ode_residual(1024) < 1e-9);
        assert!((p.spatial_period() - 2.0 * PI).abs() < 1e-10);
    }

    #[test]
    fn fit_sn_and_subluminal_branches() {
        let sn = fit_periodic_wave(1.0, -0.1, 1.2, 1).unwrap();
        assert_eq!(sn.form(), WaveForm::Sn);
        assert!(sn.ode_residual(1024) < 1e-9);
        assert!((sn.spatial_period() - 2.0 * PI).abs() < 1e-10);

        let sub = fit_periodic_wave(1.0, -0.1, 0.5, 2).unwrap();
        assert_eq!(sub.form(), WaveForm::Cn);
        assert!(sub.ode_residual(1024) < 1e-9);
        assert!((sub.spatial_period() - PI).abs() < 1e-10);

        let massless = fit_periodic_wave(0.0, 0.3, 1.5, 1).unwrap();
        assert!((massless.modulus - FRAC_1_SQRT_2).abs() < 1e-15);
        assert!(massless.ode_residual(1024) < 1e-9);
    }

    #[test]
    fn fit_errors() {
        assert_eq!(fit_periodic_wave(1.0, 0.1, 1.0, 1), Err(Error::LightCone));
        assert_eq!(fit_periodic_wave(1.0, 0.1, -1.0, 1), Err(Error::LightCone));
        // focusing sign, sub-luminal: inverted potential
        assert!(matches!(fit_periodic_wave(1.0, 0.1, 0.5, 1), Err(Error::NoPeriodicOrbit(_))));
        // just below the dispersion velocity
        let vlin = 2f64.sqrt();
        assert!(matches!(fit_periodic_wave(1.0, 0.1, vlin - 1e-6, 1), Err(Error::NoPeriodicOrbit(_))));
        assert!(fit_periodic_wave(1.0, 0.1, 2.0, 0).is_err());
    }

    #[test]
    fn amplitude_fit_recovers_dispersion() {
        for &(m, n) in &[(1.0, 1usize), (0.5, 2), (2.0, 3)] {
            let p = fit_wave_with_amplitude(m, 1e-12, 1.0, n).unwrap();
            let vlin = ((n * n) as f64 + m * m).sqrt() / n as f64;
            assert!((p.velocity - vlin).abs() < 1e-8);
            assert!(p.ode_residual(1024) < 1e-9);
        }
    }

    #[test]
    fn amplitude_and_velocity_fits_agree() {
        let p = fit_periodic_wave(1.0, 0.1, 2.0, 1).unwrap();
        let q = fit_wave_with_amplitude(1.0, 0.1, p.amplitude, 1).unwrap();
        assert!((q.velocity - 2.0).abs() < 1e-10);
        assert!((q.modulus - p.modulus).abs() < 1e-10);
        let s = fit_periodic_wave(1.0, -0.1, 1.2, 1).unwrap();
        let t = fit_wave_with_amplitude(1.0, -0.1, s.amplitude, 1).unwrap();
        assert_eq!(t.form(), WaveForm::Sn);
        assert!((t.velocity - 1.2).abs() < 1e-10);
    }

    #[test]
    fn amplitude_continuity_in_epsilon() {
        // at fixed amplitude, the wave approaches the linear one as ε → 0
        let amps: Vec<f64> = [1e-2, 1e-4, 1e-6]
            .iter()
            .map(|&e| fit_wave_with_amplitude(1.0, e, 1.0, 1).unwrap().velocity - 2f64.sqrt())
            .collect();
        assert!(amps[0].abs() > amps[1].abs() && amps[1].abs() > amps[2].abs());
        assert!(amps[2].abs() < 1e-6);
    }

    #[test]
    fn profile_periodicity_and_travel() {
        let p = fit_periodic_wave(1.0, 0.1, 2.0, 2).unwrap();
        let (x, t, d) = (0.37, 0.81, 0.53);
        assert!((profile_eval(&p, x, t) - profile_eval(&p, x + PI, t)).abs() < 1e-12);
        assert!((profile_eval(&p, x, t) - profile_eval(&p, x + 2.0 * d, t + d)).abs() < 1e-12);
        assert!((profile_eval(&p, 0.0, 0.0) - p.amplitude).abs() < 1e-15);
    }

    #[test]
    fn json_keys() {
        let p = fit_periodic_wave(1.0, 0.1, 2.0, 1).unwrap();
        let s = serde_json::to_string(&p).unwrap();
        assert!(s.starts_with(r#"{"v":2.0,"m":1.0,"epsilon":0.1,"n":1,"A":"#), "{s}");
        let back: TravelingWaveProfile = serde_json::from_str(&s).unwrap();
        assert_eq!(back.form(), WaveForm::Cn);
        assert_eq!(back.amplitude, p.amplitude);
    }
}
