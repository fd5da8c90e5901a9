//! Charge density, periodic Poisson solve, spectral upsampling and the
//! Hermite stream function of the phase-space flow.
//!
//! The stream function is `psi(x, v) = gamma(v) - phi(x) s(v)` where `gamma`
//! is the periodized `v^2 / 2` (so `d gamma / dv = g`) and `s` is 1 on the
//! core band and vanishes at the velocity seam. Since every term is a product
//! of a function of `x` and a function of `v`, its bicubic Hermite interpolant
//! is exactly the same combination of 1D cubic Hermite interpolants;
//! [`StreamFunctionField`] stores those lines.

use std::sync::Arc;

use log::warn;
use rustfft::num_complex::Complex64;

use crate::error::{CmmError, Result};
use crate::fft;
use crate::grid::Grid2D;
use crate::hermite::{HermiteField2D, HermiteLine, Jet};
use crate::periodization::PeriodizedVelocity;

/// Samples of a periodic function of `x` on `[0, lx)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarProfile1D {
    pub lx: f64,
    pub values: Vec<f64>,
}

impl ScalarProfile1D {
    pub fn new(lx: f64, values: Vec<f64>) -> Self {
        ScalarProfile1D { lx, values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn hx(&self) -> f64 {
        self.lx / self.values.len() as f64
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }
}

/// `rho(x_i) = hv * sum_j f(x_i, v_j)` for samples stored in grid order.
pub fn charge_density(f: &[f64], grid: &Grid2D) -> ScalarProfile1D {
    assert_eq!(f.len(), grid.len(), "samples do not match the grid");
    let values = f
        .chunks_exact(grid.nv)
        .map(|row| grid.hv * row.iter().sum::<f64>())
        .collect();
    ScalarProfile1D::new(grid.domain.lx, values)
}

/// Potential and its derivative from one Poisson solve.
#[derive(Debug, Clone, PartialEq)]
pub struct PoissonSolution {
    pub phi: ScalarProfile1D,
    pub dphi_dx: ScalarProfile1D,
    /// `mean(coupling * rho) - 1`; nonzero means the plasma is not neutral.
    pub neutrality_residual: f64,
}

const NEUTRALITY_TOL: f64 = 1e-6;

/// Solves `phi'' = coupling * rho - 1` with zero-mean gauge.
pub fn solve_poisson(rho: &ScalarProfile1D, coupling: f64) -> Result<PoissonSolution> {
    let n = rho.len();
    if n < 2 || n % 2 != 0 {
        return Err(CmmError::Config(format!("profile length must be even, got {n}")));
    }
    let src: Vec<f64> = rho.values.iter().map(|r| 1.0 - coupling * r).collect();
    let neutrality_residual = -src.iter().sum::<f64>() / n as f64;
    if neutrality_residual.abs() > NEUTRALITY_TOL {
        warn!("charge neutrality violated: mean(l rho) - 1 = {neutrality_residual:e}");
    }
    let mut spec = fft::forward_real(&src);
    let base = 2.0 * std::f64::consts::PI / rho.lx;
    let mut dspec = vec![Complex64::new(0.0, 0.0); n];
    spec[0] = Complex64::new(0.0, 0.0);
    for m in 1..n {
        let kappa = base * fft::signed_mode(m, n) as f64;
        spec[m] /= kappa * kappa;
        if m != n / 2 {
            dspec[m] = spec[m] * Complex64::new(0.0, kappa);
        }
    }
    Ok(PoissonSolution {
        phi: ScalarProfile1D::new(rho.lx, fft::inverse_real(spec)),
        dphi_dx: ScalarProfile1D::new(rho.lx, fft::inverse_real(dspec)),
        neutrality_residual,
    })
}

/// Spectral first derivative of a periodic profile (Nyquist mode dropped).
pub fn spectral_derivative(p: &ScalarProfile1D, order: u32) -> ScalarProfile1D {
    let n = p.len();
    let mut spec = fft::forward_real(&p.values);
    let base = 2.0 * std::f64::consts::PI / p.lx;
    for (m, c) in spec.iter_mut().enumerate() {
        if m == n / 2 && order % 2 == 1 {
            *c = Complex64::new(0.0, 0.0);
            continue;
        }
        let ik = Complex64::new(0.0, base * fft::signed_mode(m, n) as f64);
        *c *= ik.powu(order);
    }
    ScalarProfile1D::new(p.lx, fft::inverse_real(spec))
}

/// Band-limited resampling of a profile onto `target` points.
pub fn zero_pad_upsample(p: &ScalarProfile1D, target: usize) -> Result<ScalarProfile1D> {
    let n = p.len();
    if target < n || target % 2 != 0 || n % 2 != 0 {
        return Err(CmmError::Config(format!(
            "cannot upsample from {n} to {target} points (need even sizes, target >= source)"
        )));
    }
    if target == n {
        return Ok(p.clone());
    }
    let spec = fft::forward_real(&p.values);
    let mut big = vec![Complex64::new(0.0, 0.0); target];
    let scale = target as f64 / n as f64;
    for m in 0..n / 2 {
        big[m] = spec[m] * scale;
    }
    for m in n / 2 + 1..n {
        big[target - n + m] = spec[m] * scale;
    }
    // the Nyquist coefficient is shared by +n/2 and -n/2 in the longer spectrum
    let nyq = spec[n / 2] * (0.5 * scale);
    big[n / 2] = nyq;
    big[target - n / 2] = nyq;
    Ok(ScalarProfile1D::new(p.lx, fft::inverse_real(big)))
}

/// A divergence-free phase-space velocity `(u1, u2)`.
pub trait VelocityField {
    fn velocity(&self, x: f64, v: f64) -> (f64, f64);
}

impl<F: Fn(f64, f64) -> (f64, f64)> VelocityField for F {
    #[inline]
    fn velocity(&self, x: f64, v: f64) -> (f64, f64) {
        self(x, v)
    }
}

/// The time-independent `v` profiles of the stream function.
#[derive(Debug, Clone, PartialEq)]
pub struct VelocityProfile {
    /// `gamma` with `g` as derivative data.
    pub kinetic: HermiteLine,
    /// Force cutoff `s` with `s'` as derivative data.
    pub cutoff: HermiteLine,
}

impl VelocityProfile {
    pub fn new(pv: &PeriodizedVelocity) -> Self {
        VelocityProfile {
            kinetic: pv.stream_line(),
            cutoff: pv.cutoff_line(),
        }
    }
}

/// Hermite stream function `gamma(v) - phi(x) s(v)` on the velocity grid.
#[derive(Debug, Clone, PartialEq)]
pub struct StreamFunctionField {
    pub grid: Grid2D,
    /// Shared between snapshots.
    pub profile: Arc<VelocityProfile>,
    /// `phi` with `d phi / dx` as derivative data.
    pub potential: HermiteLine,
}

/// Builds the stream function from `phi`, `d phi/dx` on the x-nodes of `grid`
/// and the periodized velocity on its v-nodes.
pub fn assemble_stream(
    phi: &ScalarProfile1D,
    dphi_dx: &ScalarProfile1D,
    pv: &PeriodizedVelocity,
    grid: &Grid2D,
) -> Result<StreamFunctionField> {
    assemble_stream_shared(phi, dphi_dx, Arc::new(VelocityProfile::new(pv)), grid)
}

pub(crate) fn assemble_stream_shared(
    phi: &ScalarProfile1D,
    dphi_dx: &ScalarProfile1D,
    profile: Arc<VelocityProfile>,
    grid: &Grid2D,
) -> Result<StreamFunctionField> {
    let kinetic = &profile.kinetic;
    if phi.len() != grid.nx || dphi_dx.len() != grid.nx {
        return Err(CmmError::Config(format!(
            "potential has {} samples, grid has {} x-nodes",
            phi.len(),
            grid.nx
        )));
    }
    if kinetic.value.len() != grid.nv || (kinetic.h - grid.hv).abs() > 1e-12 * grid.hv {
        return Err(CmmError::Config(format!(
            "velocity profile has {} samples, grid has {} v-nodes",
            kinetic.value.len(),
            grid.nv
        )));
    }
    Ok(StreamFunctionField {
        grid: *grid,
        profile: Arc::clone(&profile),
        potential: HermiteLine::new(0.0, grid.hx, phi.values.clone(), dphi_dx.values.clone()),
    })
}

impl StreamFunctionField {
    /// Interpolated stream function.
    pub fn psi(&self, x: f64, v: f64) -> f64 {
        self.profile.kinetic.eval(v) - self.potential.eval(x) * self.profile.cutoff.eval(v)
    }

    /// `(d psi/dv, -d psi/dx)` of the interpolant.
    #[inline]
    pub fn velocity_at(&self, x: f64, v: f64) -> (f64, f64) {
        let (s, ds) = self.profile.cutoff.eval_with_slope(v);
        let (p, dp) = self.potential.eval_with_slope(x);
        (self.profile.kinetic.slope(v) - p * ds, dp * s)
    }

    /// The same interpolant as explicit bicubic node data.
    pub fn to_hermite(&self) -> HermiteField2D {
        let k = &self.profile.kinetic;
        let c = &self.profile.cutoff;
        let p = &self.potential;
        let nv = self.grid.nv;
        let mut field = HermiteField2D::zeros(self.grid);
        for i in 0..self.grid.nx {
            for j in 0..nv {
                field.set_node(
                    i * nv + j,
                    Jet {
                        value: k.value[j] - p.value[i] * c.value[j],
                        dx: -p.deriv[i] * c.value[j],
                        dv: k.deriv[j] - p.value[i] * c.deriv[j],
                        dxv: -p.deriv[i] * c.deriv[j],
                    },
                );
            }
        }
        field
    }

    /// Linear combination of snapshots sharing the same velocity profile.
    ///
    /// The weights are expected to sum to one; only the potentials are combined.
    pub fn combine(fields: &[&StreamFunctionField], weights: &[f64]) -> Result<StreamFunctionField> {
        let first = fields
            .first()
            .ok_or_else(|| CmmError::State("no stream functions to combine".into()))?;
        let n = first.potential.value.len();
        let mut value = vec![0.0; n];
        let mut deriv = vec![0.0; n];
        for (f, &w) in fields.iter().zip(weights) {
            if f.grid != first.grid || !Arc::ptr_eq(&f.profile, &first.profile) && f.profile != first.profile {
                return Err(CmmError::State("stream functions live on different grids".into()));
            }
            for i in 0..n {
                value[i] += w * f.potential.value[i];
                deriv[i] += w * f.potential.deriv[i];
            }
        }
        Ok(StreamFunctionField {
            grid: first.grid,
            profile: Arc::clone(&first.profile),
            potential: HermiteLine::new(0.0, first.grid.hx, value, deriv),
        })
    }
}

impl VelocityField for StreamFunctionField {
    #[inline]
    fn velocity(&self, x: f64, v: f64) -> (f64, f64) {
        self.velocity_at(x, v)
    }
}

/// `(d psi/dv, -d psi/dx)` of a general bicubic stream function.
pub fn velocity_from_hermite(psi: &HermiteField2D, x: f64, v: f64) -> (f64, f64) {
    let (_, px, pv) = psi.eval_grad(x, v);
    (pv, -px)
}
