//! Periodic extension of the phase-space velocity `u1 = v`.
//!
//! The velocity `g(v)` equals `v` on the core band `|v| <= v_star` and returns
//! smoothly to its periodic image through a boundary layer of width
//! `a = lv - v_star`. Its derivative `h = g'` is a rescaled and shifted smooth
//! Heaviside built from the standard mollifier, so that `h = 1` on the core
//! and `h` has zero mean over the period.

use std::sync::OnceLock;

use crate::error::{CmmError, Result};
use crate::hermite::HermiteLine;
use crate::quadrature;

const PANELS: usize = 64;

#[inline]
fn bump(s: f64) -> f64 {
    if s.abs() < 1.0 {
        (-1.0 / (1.0 - s * s)).exp()
    } else {
        0.0
    }
}

/// `I = int_{-1}^{1} exp(-1/(1-s^2)) ds`.
pub fn mollifier_norm() -> f64 {
    static NORM: OnceLock<f64> = OnceLock::new();
    *NORM.get_or_init(|| quadrature::integrate(bump, -1.0, 1.0, PANELS))
}

/// Normalized mollifier, supported on `(-1, 1)` with unit integral.
#[inline]
pub fn mollifier_eta(s: f64) -> f64 {
    bump(s) / mollifier_norm()
}

/// `int_{-1}^{s} eta`, clamped to 0 below the support and 1 above it.
pub fn mollifier_cdf(s: f64) -> f64 {
    if s <= -1.0 {
        0.0
    } else if s >= 1.0 {
        1.0
    } else {
        quadrature::integrate(mollifier_eta, -1.0, s, PANELS)
    }
}

/// `sigma(v) = 1 - (lv / a^2) eta((|v| - lv) / a)` at the given nodes.
pub fn build_sigma(v_nodes: &[f64], lv: f64, a: f64) -> Result<Vec<f64>> {
    if !(a > 0.0 && a < lv) {
        return Err(CmmError::Config(format!(
            "extension length must satisfy 0 < a < lv, got a = {a}, lv = {lv}"
        )));
    }
    let scale = lv / (a * a);
    Ok(v_nodes
        .iter()
        .map(|v| 1.0 - scale * mollifier_eta((v.abs() - lv) / a))
        .collect())
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

fn shift_and_rescale(x: &[f64]) -> Result<Vec<f64>> {
    let m = mean(x);
    let shifted: Vec<f64> = x.iter().map(|s| s - m).collect();
    let top = shifted.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !(top > 0.0) || !top.is_finite() {
        return Err(CmmError::Degenerate(format!(
            "max(sigma - mean) = {top}; sigma has no shape to rescale"
        )));
    }
    Ok(shifted.into_iter().map(|s| s / top).collect())
}

/// Shifts `sigma` to zero discrete mean and rescales so that `max h = 1`.
pub fn build_h(sigma: &[f64]) -> Result<Vec<f64>> {
    if sigma.is_empty() || sigma.iter().any(|s| !s.is_finite()) {
        return Err(CmmError::Degenerate("sigma must be non-empty and finite".into()));
    }
    let mut h = shift_and_rescale(sigma)?;
    for _ in 0..2 {
        h = shift_and_rescale(&h)?;
    }
    Ok(h)
}

/// `int_{-1}^{s} (s - t) eta(t) dt`, the second antiderivative of `eta`.
pub fn mollifier_second_integral(s: f64) -> f64 {
    if s <= -1.0 {
        0.0
    } else if s >= 1.0 {
        // int (s - t) eta = s - first moment, and eta is even
        s
    } else {
        quadrature::integrate(|t| (s - t) * mollifier_eta(t), -1.0, s, PANELS)
    }
}

/// Amplitude `c` of `h = 1 - c eta((|v| - lv)/a)`, recovered from the samples.
fn bump_amplitude(h: &[f64], v_nodes: &[f64], lv: f64, a: f64) -> Result<f64> {
    if h.len() != v_nodes.len() {
        return Err(CmmError::Config("h and v grid lengths differ".into()));
    }
    let m = mean(h);
    if m.abs() > 1e-12 {
        return Err(CmmError::Precondition(format!("h must have zero mean, got {m:e}")));
    }
    let eta: Vec<f64> = v_nodes.iter().map(|v| mollifier_eta((v.abs() - lv) / a)).collect();
    let (num, den) = h
        .iter()
        .zip(&eta)
        .fold((0.0, 0.0), |(n, d), (h, e)| (n + (1.0 - h) * e, d + e * e));
    if !(den > 0.0) {
        return Err(CmmError::Precondition(
            "no grid node inside the boundary layer; refine the velocity grid".into(),
        ));
    }
    let c = num / den;
    let misfit = h
        .iter()
        .zip(&eta)
        .map(|(h, e)| (1.0 - c * e - h).abs())
        .fold(0.0, f64::max);
    if misfit > 1e-9 * c.max(1.0) {
        return Err(CmmError::Precondition(format!(
            "h is not of boundary-layer bump form (misfit {misfit:e})"
        )));
    }
    Ok(c)
}

/// Antiderivative of the bump-shaped `h = 1 - c eta((|v| - lv)/a)` with `g(0) = 0`.
///
/// The amplitude `c` is recovered from the samples, and `g` is evaluated from
/// the exact integral of the mollifier, so `g(v) = v` holds exactly wherever
/// the bump vanishes and the samples of `h` are the exact derivative of `g`.
pub fn build_g(h: &[f64], v_nodes: &[f64], lv: f64, a: f64) -> Result<Vec<f64>> {
    let c = bump_amplitude(h, v_nodes, lv, a)?;
    Ok(v_nodes
        .iter()
        .map(|&v| v - v.signum() * c * a * mollifier_cdf((v.abs() - lv) / a))
        .collect())
}

/// Even antiderivative of `g` with value 0 at `v = 0`: the periodized `v^2 / 2`.
pub fn build_potential(h: &[f64], v_nodes: &[f64], lv: f64, a: f64) -> Result<Vec<f64>> {
    let c = bump_amplitude(h, v_nodes, lv, a)?;
    Ok(v_nodes
        .iter()
        .map(|&v| 0.5 * v * v - c * a * a * mollifier_second_integral((v.abs() - lv) / a))
        .collect())
}

/// Sampled periodized velocity on a uniform `v` grid over `[-lv, lv)`.
///
/// `gamma` is the antiderivative of `g` (the periodized `v^2 / 2`); it is the
/// velocity part of the stream function. `cutoff` multiplies the potential in
/// the stream function: it is 1 on the core and falls smoothly to 0 across the
/// boundary layer, so the force vanishes at the seam `|v| = lv`.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodizedVelocity {
    pub lv: f64,
    pub v_star: f64,
    pub a: f64,
    pub hv: f64,
    pub h: Vec<f64>,
    pub g: Vec<f64>,
    pub gamma: Vec<f64>,
    pub cutoff: Vec<f64>,
    pub cutoff_slope: Vec<f64>,
}

impl PeriodizedVelocity {
    pub fn new(lv: f64, v_star: f64, nv: usize) -> Result<Self> {
        if !(v_star > 0.0 && v_star < lv) {
            return Err(CmmError::Config(format!(
                "need 0 < v_star < lv, got v_star = {v_star}, lv = {lv}"
            )));
        }
        if nv < 4 || nv % 2 != 0 {
            return Err(CmmError::Config(format!("nv must be even and >= 4, got {nv}")));
        }
        let a = lv - v_star;
        let hv = 2.0 * lv / nv as f64;
        let v: Vec<f64> = (0..nv).map(|j| (j as f64 - (nv / 2) as f64) * hv).collect();
        let sigma = build_sigma(&v, lv, a)?;
        let h = build_h(&sigma)?;
        let g = build_g(&h, &v, lv, a)?;
        let gamma = build_potential(&h, &v, lv, a)?;
        let (cutoff, cutoff_slope) = v.iter().map(|&q| force_cutoff(q, v_star, a)).unzip();
        Ok(PeriodizedVelocity {
            lv,
            v_star,
            a,
            hv,
            h,
            g,
            gamma,
            cutoff,
            cutoff_slope,
        })
    }

    pub fn nv(&self) -> usize {
        self.h.len()
    }

    pub fn v(&self, j: usize) -> f64 {
        (j as f64 - (self.nv() / 2) as f64) * self.hv
    }

    /// Hermite interpolant of `g` with `h` as derivative data.
    pub fn velocity_line(&self) -> HermiteLine {
        HermiteLine::new(-self.lv, self.hv, self.g.clone(), self.h.clone())
    }

    /// Hermite interpolant of `gamma` with `g` as derivative data.
    pub fn stream_line(&self) -> HermiteLine {
        HermiteLine::new(-self.lv, self.hv, self.gamma.clone(), self.g.clone())
    }
}

impl PeriodizedVelocity {
    /// Hermite interpolant of the force cutoff.
    pub fn cutoff_line(&self) -> HermiteLine {
        HermiteLine::new(-self.lv, self.hv, self.cutoff.clone(), self.cutoff_slope.clone())
    }
}

/// Smooth step `s(v)` and its derivative: 1 for `|v| <= v_star`, 0 at
/// `|v| = v_star + a`, with every derivative vanishing at both ends.
///
/// Without it the seam, where `g` crosses zero with slope `-v_star / a`,
/// is a hyperbolic point of the flow for any force and the map stretches
/// exponentially there.
pub fn force_cutoff(v: f64, v_star: f64, a: f64) -> (f64, f64) {
    let s = 2.0 * (v.abs() - v_star) / a - 1.0;
    if s <= -1.0 {
        (1.0, 0.0)
    } else if s >= 1.0 {
        (0.0, 0.0)
    } else {
        (1.0 - mollifier_cdf(s), -v.signum() * 2.0 / a * mollifier_eta(s))
    }
}

/// Result of the boundary-layer optimization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtensionChoice {
    pub a: f64,
    pub efficiency: f64,
    pub residual: f64,
}

/// Share of the velocity period spent on the core band.
pub fn extension_efficiency(a: f64, v_star: f64) -> f64 {
    v_star / (a + v_star)
}

/// Balance between the fourth-order map error and the mollifier truncation error.
pub fn extension_residual(a: f64, n: f64, v_star: f64) -> f64 {
    let na = a * n / (a + v_star);
    let sq = na.sqrt();
    4.0 * (a + v_star).powi(3) / n.powi(4)
        - na.powf(-1.75) * (-sq).exp() * ((v_star / (4.0 * a)) * (2.0 * sq + 7.0) - 1.0)
}

/// Optimal boundary-layer width for a grid of `n` points, by bisection on
/// `(1e-3 v_star, v_star)`.
pub fn optimize_extension(n: usize, v_star: f64) -> Result<ExtensionChoice> {
    if n < 16 {
        return Err(CmmError::Config(format!("grid size must be >= 16, got {n}")));
    }
    if !(v_star > 0.0) {
        return Err(CmmError::Config(format!("v_star must be positive, got {v_star}")));
    }
    let nf = n as f64;
    let f = |a: f64| extension_residual(a, nf, v_star);
    let (mut lo, mut hi) = (1e-3 * v_star, v_star);
    let (mut f_lo, f_hi) = (f(lo), f(hi));
    if !(f_lo.signum() * f_hi.signum() < 0.0) {
        return Err(CmmError::RootNotFound { lo, hi, f_lo, f_hi });
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let f_mid = f(mid);
        if f_mid == 0.0 {
            lo = mid;
            hi = mid;
            break;
        }
        if f_mid.signum() == f_lo.signum() {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    let a = 0.5 * (lo + hi);
    Ok(ExtensionChoice {
        a,
        efficiency: extension_efficiency(a, v_star),
        residual: f(a),
    })
}
