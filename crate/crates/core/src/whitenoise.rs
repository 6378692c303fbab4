//! Closed forms of the random-force and white-noise models.
//!
//! Functions without a suffix work in rescaled units (`τ = 1`, strength
//! `ṽ₀`). The `_quantum` variants take `(v0, τ)` and return quantum-unit
//! times and energies.

use std::f64::consts::{FRAC_2_SQRT_PI, PI, SQRT_2};

use libm::erf;

use crate::error::{Error, Result};
use crate::potential::PotentialRealization;

/// `sqrt(π/2)`.
pub const SQRT_HALF_PI: f64 = 1.253_314_137_315_500_1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalyticParams {
    vtilde: f64,
    gamma2: f64,
    ek0: f64,
    xdot0: f64,
}

impl AnalyticParams {
    pub fn new(vtilde: f64, ek0: f64, xdot0: f64) -> Result<Self> {
        if !(vtilde.is_finite() && vtilde >= 0.0) {
            return Err(Error::Argument(format!("vtilde must be >= 0, got {vtilde}")));
        }
        Ok(Self {
            vtilde,
            gamma2: vtilde * vtilde * SQRT_HALF_PI,
            ek0,
            xdot0,
        })
    }

    /// Particles starting at rest.
    pub fn at_rest(vtilde: f64) -> Result<Self> {
        Self::new(vtilde, 0.0, 0.0)
    }

    pub fn vtilde(&self) -> f64 {
        self.vtilde
    }

    /// `γ² = ṽ₀²·sqrt(π/2)`.
    pub fn gamma2(&self) -> f64 {
        self.gamma2
    }

    pub fn ek0(&self) -> f64 {
        self.ek0
    }

    pub fn xdot0(&self) -> f64 {
        self.xdot0
    }
}

/// `∫₀^z erf(s) ds = z·erf(z) + (e^{-z²} - 1)/sqrt(π)`.
pub fn erf_integral(z: f64) -> f64 {
    // series near zero avoids cancellation: z²/sqrt(π)·(1 - z²/6 + z⁴/30 - ...)
    if z.abs() < 1e-3 {
        let z2 = z * z;
        return 0.5 * FRAC_2_SQRT_PI * z2 * (1.0 - z2 / 6.0 + z2 * z2 / 30.0);
    }
    z * erf(z) + (-z * z).exp_m1() * 0.5 * FRAC_2_SQRT_PI
}

/// Random-force kinetic energy `e_k(0) + ṽ₀²·sqrt(π)·∫₀^{t/√2} erf(z) dz`.
pub fn ek_random_force(t: f64, p: &AnalyticParams) -> f64 {
    p.ek0 + p.vtilde * p.vtilde * PI.sqrt() * erf_integral(t / SQRT_2)
}

/// `e_k(0) + γ²·t`.
pub fn ek_white_noise(t: f64, p: &AnalyticParams) -> f64 {
    p.ek0 + p.gamma2 * t
}

/// `ẋ(0)²·t² + (2/3)·γ²·t³`.
pub fn sigma2_white_noise(t: f64, p: &AnalyticParams) -> f64 {
    p.xdot0 * p.xdot0 * t * t + 2.0 / 3.0 * p.gamma2 * t * t * t
}

/// Random-force kinetic energy at quantum time `t`.
pub fn ek_random_force_quantum(t: f64, v0: f64, tau: f64, ek0: f64) -> f64 {
    ek0 + v0 * v0 * tau * tau * PI.sqrt() * erf_integral(t / (tau * SQRT_2))
}

/// `e_k(0) + sqrt(π/2)·v0²·τ·t`.
pub fn ek_white_noise_quantum(t: f64, v0: f64, tau: f64, ek0: f64) -> f64 {
    ek0 + SQRT_HALF_PI * v0 * v0 * tau * t
}

/// `ẋ(0)²·t² + (2/3)·sqrt(π/2)·v0²·τ·t³`.
pub fn sigma2_white_noise_quantum(t: f64, v0: f64, tau: f64, xdot0: f64) -> f64 {
    xdot0 * xdot0 * t * t + 2.0 / 3.0 * SQRT_HALF_PI * v0 * v0 * tau * t * t * t
}

fn branching_prefactor() -> f64 {
    (9.0 / (2.0 * PI)).powf(1.0 / 6.0)
}

/// `t_b = (9/2π)^{1/6}·v0^{-2/3}·τ^{-1/3}`; infinite when `v0 = 0`.
pub fn branching_time(v0: f64, tau: f64) -> f64 {
    if v0 == 0.0 {
        return f64::INFINITY;
    }
    branching_prefactor() * v0.powf(-2.0 / 3.0) * tau.powf(-1.0 / 3.0)
}

/// `t_b/τ = (9/2π)^{1/6}·ṽ₀^{-2/3}`.
pub fn branching_time_rescaled(vtilde: f64) -> f64 {
    if vtilde == 0.0 {
        return f64::INFINITY;
    }
    branching_prefactor() * vtilde.powf(-2.0 / 3.0)
}

/// `t_e = 1/(sqrt(π/2)·v0·τ)`; infinite when `v0 = 0`.
pub fn energy_time(v0: f64, tau: f64) -> f64 {
    if v0 == 0.0 {
        return f64::INFINITY;
    }
    1.0 / (SQRT_HALF_PI * v0 * tau)
}

/// `t_e/τ = 1/(sqrt(π/2)·ṽ₀)`.
pub fn energy_time_rescaled(vtilde: f64) -> f64 {
    if vtilde == 0.0 {
        return f64::INFINITY;
    }
    1.0 / (SQRT_HALF_PI * vtilde)
}

/// `ṽ₀` at which `t_b = τ`: `(9/2π)^{1/4}`.
pub fn validity_bound() -> f64 {
    (9.0 / (2.0 * PI)).powf(0.25)
}

/// `ṽ₀` at which `t_b = t_e`: `((2π/9)^{1/6}·sqrt(2/π))³`.
pub fn crossover_vtilde() -> f64 {
    ((2.0 * PI / 9.0).powf(1.0 / 6.0) * (2.0 / PI).sqrt()).powi(3)
}

/// Result of [`transient_time_estimate`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransientEstimate {
    /// Mean traversal time over the accepted start points, in rescaled units.
    pub mean: f64,
    pub accepted: usize,
    /// Start points whose path climbs back to the starting height.
    pub skipped: usize,
}

const TRAVERSAL_NODES: usize = 48;

/// Gauss-Legendre nodes and weights on `[0, 1]`.
fn gauss_legendre_unit(n: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let step = p1 / dp;
            x -= step;
            if step.abs() < 1e-15 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        out.push((0.5 * (1.0 - x), 0.5 * w));
    }
    out
}

/// Time to slide one correlation length from rest down a frozen profile,
/// `∫ dx / sqrt(2ṽ₀(ξ(x₀) - ξ(x)))` over `x = x₀ + direction·u²`, `u ∈ [0, 1]`.
///
/// Returns `None` when the profile reaches `ξ(x₀)` again along the path.
pub fn traversal_time(vtilde: f64, xi: impl Fn(f64) -> f64, x0: f64, direction: f64) -> Option<f64> {
    let top = xi(x0);
    let mut total = 0.0;
    for (u, w) in gauss_legendre_unit(TRAVERSAL_NODES) {
        let drop = top - xi(x0 + direction * u * u);
        if drop <= 0.0 {
            return None;
        }
        total += w * 2.0 * u / (2.0 * vtilde * drop).sqrt();
    }
    Some(total)
}

/// Averages [`traversal_time`] over `n_starts` evenly spaced start points on
/// the `t = 0` slice of `realization`, each sliding in its downhill direction.
pub fn transient_time_estimate(
    vtilde: f64,
    realization: &PotentialRealization,
    n_starts: usize,
) -> Result<TransientEstimate> {
    if !(vtilde.is_finite() && vtilde > 0.0) {
        return Err(Error::Argument(format!("vtilde must be > 0, got {vtilde}")));
    }
    if n_starts == 0 {
        return Err(Error::Argument("need at least one start point".into()));
    }
    let length = realization.grid().length();
    let xi = |x: f64| realization.evaluate_xi(x.rem_euclid(length), 0.0).unwrap_or(f64::NAN);
    let (mut sum, mut accepted, mut skipped) = (0.0, 0usize, 0usize);
    for i in 0..n_starts {
        let x0 = (i as f64 + 0.5) * length / n_starts as f64;
        let slope = realization.gradient_at(x0, 0.0)?;
        let direction = if slope > 0.0 { -1.0 } else { 1.0 };
        match traversal_time(vtilde, xi, x0, direction) {
            Some(t) if t.is_finite() => {
                sum += t;
                accepted += 1;
            }
            _ => skipped += 1,
        }
    }
    Ok(TransientEstimate {
        mean: if accepted > 0 { sum / accepted as f64 } else { f64::NAN },
        accepted,
        skipped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gamma2_is_derived() {
        let p = AnalyticParams::new(0.3, 0.1, 0.2).unwrap();
        assert_eq!(p.gamma2(), 0.09 * SQRT_HALF_PI);
        assert_eq!(SQRT_HALF_PI, (PI / 2.0).sqrt());
        assert!(AnalyticParams::new(-1.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn erf_integral_branches_agree() {
        for z in [9.9e-4f64, 1.01e-3] {
            let series = 0.5 * FRAC_2_SQRT_PI * z * z * (1.0 - z * z / 6.0);
            assert!((erf_integral(z) - series).abs() < 1e-15);
        }
        assert_eq!(erf_integral(0.0), 0.0);
    }

    #[test]
    fn random_force_is_convex_and_starts_flat() {
        let p = AnalyticParams::new(1.0, 0.5, 0.0).unwrap();
        assert_eq!(ek_random_force(0.0, &p), 0.5);
        let h = 1e-3;
        let slope0 = (ek_random_force(h, &p) - ek_random_force(0.0, &p)) / h;
        assert!(slope0 < 1e-3);
        let mut prev_slope = 0.0;
        for i in 1..60 {
            let t = i as f64 * 0.1;
            let s = (ek_random_force(t + h, &p) - ek_random_force(t, &p)) / h;
            assert!(s > prev_slope);
            prev_slope = s;
        }
    }

    #[test]
    fn quantum_forms_rescale() {
        let (v0, tau) = (50.0, 0.04472);
        let p = AnalyticParams::at_rest(v0 * tau * tau).unwrap();
        for t in [0.01, 0.2, 1.0] {
            let a = ek_white_noise_quantum(t, v0, tau, 0.0);
            let b = ek_white_noise(t / tau, &p) / (tau * tau);
            assert!((a - b).abs() < 1e-10 * a);
            let a = ek_random_force_quantum(t, v0, tau, 0.0);
            let b = ek_random_force(t / tau, &p) / (tau * tau);
            assert!((a - b).abs() < 1e-10 * a);
            let a = sigma2_white_noise_quantum(t, v0, tau, 0.0);
            let b = sigma2_white_noise(t / tau, &p);
            assert!((a - b).abs() < 1e-10 * a);
        }
        let tb = branching_time(v0, tau);
        assert!((tb / tau - branching_time_rescaled(v0 * tau * tau)).abs() < 1e-12);
        assert!((sigma2_white_noise_quantum(tb, v0, tau, 0.0) - 1.0).abs() < 1e-12);
        let te = energy_time(v0, tau);
        assert!((ek_white_noise_quantum(te, v0, tau, 0.0) - v0).abs() < 1e-10);
    }

    #[test]
    fn free_limit_is_infinite() {
        assert_eq!(branching_time(0.0, 1.0), f64::INFINITY);
        assert_eq!(energy_time(0.0, 1.0), f64::INFINITY);
        assert_eq!(branching_time_rescaled(0.0), f64::INFINITY);
        assert_eq!(energy_time_rescaled(0.0), f64::INFINITY);
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let nodes = gauss_legendre_unit(TRAVERSAL_NODES);
        let sum_w: f64 = nodes.iter().map(|(_, w)| w).sum();
        assert!((sum_w - 1.0).abs() < 1e-14);
        let p: f64 = nodes.iter().map(|(u, w)| w * u.powi(21)).sum();
        assert!((p - 1.0 / 22.0).abs() < 1e-14);
    }

    #[test]
    fn ramp_traversal_matches_closed_form() {
        let (v, s, x0) = (0.7, 2.5, 3.0);
        let t = traversal_time(v, |x| 1.0 - s * (x - x0), x0, 1.0).unwrap();
        assert!((t - (2.0 / (v * s)).sqrt()).abs() < 1e-12);
        // climbing the ramp is rejected
        assert!(traversal_time(v, |x| 1.0 - s * (x - x0), x0, -1.0).is_none());
    }

    #[test]
    fn traversal_scales_as_inverse_sqrt() {
        let xi = |x: f64| (x * 1.3).cos() + 0.3 * (x * 0.4).sin();
        let a = traversal_time(0.5, xi, 0.4, 1.0).unwrap();
        let b = traversal_time(2.0, xi, 0.4, 1.0).unwrap();
        assert!((a / b - 2.0).abs() < 1e-12);
    }
}
