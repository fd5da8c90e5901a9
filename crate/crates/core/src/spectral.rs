//! Fourier pseudo-spectral solver for the same periodized system.
//!
//! `f` is carried as 2D DFT coefficients on a square grid. Products are
//! formed in physical space and the result is truncated by the 2/3 rule.

use std::time::Instant;

use log::{info, warn};
use rustfft::num_complex::Complex64;

use crate::config::SimulationConfig;
use crate::diagnostics::{moments, DiagnosticsRecord};
use crate::error::{CmmError, Result};
use crate::fft;
use crate::fields::{spectral_derivative, ScalarProfile1D};
use crate::grid::Grid2D;
use crate::periodization::PeriodizedVelocity;

/// DFT coefficients of `f` (unnormalized forward transform), `x` index slowest.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralState {
    pub grid: Grid2D,
    pub coeffs: Vec<Complex64>,
    pub t: f64,
}

impl SpectralState {
    pub fn from_physical(grid: Grid2D, f: &[f64], t: f64) -> Result<Self> {
        if grid.nx != grid.nv {
            return Err(CmmError::Config(format!(
                "spectral grid must be square, got {}x{}",
                grid.nx, grid.nv
            )));
        }
        if f.len() != grid.len() {
            return Err(CmmError::Config("samples do not match the grid".into()));
        }
        let mut coeffs: Vec<Complex64> = f.iter().map(|&r| Complex64::new(r, 0.0)).collect();
        fft::forward_2d(&mut coeffs, grid.nx, grid.nv);
        Ok(SpectralState { grid, coeffs, t })
    }

    pub fn n(&self) -> usize {
        self.grid.nx
    }

    pub fn to_physical(&self) -> Vec<f64> {
        let mut buf = self.coeffs.clone();
        fft::inverse_2d(&mut buf, self.grid.nx, self.grid.nv);
        buf.into_iter().map(|c| c.re).collect()
    }

    /// `hx hv sum f`, read off the zero mode.
    pub fn mass(&self) -> f64 {
        self.coeffs[0].re * self.grid.hx * self.grid.hv
    }

    /// Discrete `L2` norm via Parseval.
    pub fn l2_norm(&self) -> f64 {
        let s: f64 = self.coeffs.iter().map(|c| c.norm_sqr()).sum();
        (s * self.grid.hx * self.grid.hv / self.grid.len() as f64).sqrt()
    }
}

/// True if the signed mode survives the 2/3 rule on `n` points.
#[inline]
fn kept(m: usize, n: usize) -> bool {
    3 * fft::signed_mode(m, n).unsigned_abs() as usize <= n
}

/// Zeroes every coefficient with `|k_x| > N/3` or `|k_v| > N/3`.
pub fn dealias_23(state: &mut SpectralState) {
    let (nx, nv) = (state.grid.nx, state.grid.nv);
    dealias_coeffs(&mut state.coeffs, nx, nv);
}

fn dealias_coeffs(c: &mut [Complex64], nx: usize, nv: usize) {
    for i in 0..nx {
        let keep_x = kept(i, nx);
        for j in 0..nv {
            if !keep_x || !kept(j, nv) {
                c[i * nv + j] = Complex64::new(0.0, 0.0);
            }
        }
    }
}

/// Right-hand side of the periodized Vlasov equation in coefficient space.
pub struct SpectralRhs {
    grid: Grid2D,
    g: Vec<f64>,
    cutoff: Vec<f64>,
    cutoff_slope: Vec<f64>,
    coupling: f64,
    kx: Vec<f64>,
    kv: Vec<f64>,
    /// Replaces the self-consistent force when set (testing hook).
    pub force_override: Option<Vec<f64>>,
}

impl SpectralRhs {
    pub fn new(grid: Grid2D, pv: &PeriodizedVelocity, coupling: f64) -> Result<Self> {
        if pv.nv() != grid.nv || (pv.hv - grid.hv).abs() > 1e-12 * grid.hv {
            return Err(CmmError::Config(format!(
                "periodized velocity has {} nodes, grid has {}",
                pv.nv(),
                grid.nv
            )));
        }
        let bx = 2.0 * std::f64::consts::PI / grid.domain.lx;
        let bv = std::f64::consts::PI / grid.domain.lv;
        Ok(SpectralRhs {
            grid,
            g: pv.g.clone(),
            cutoff: pv.cutoff.clone(),
            // the spectral derivative keeps the discrete velocity exactly
            // divergence free, which is what makes the zero mode constant
            cutoff_slope: spectral_derivative(&ScalarProfile1D::new(2.0 * grid.domain.lv, pv.cutoff.clone()), 1)
                .values,
            coupling,
            kx: (0..grid.nx).map(|m| bx * fft::signed_mode(m, grid.nx) as f64).collect(),
            kv: (0..grid.nv).map(|m| bv * fft::signed_mode(m, grid.nv) as f64).collect(),
            force_override: None,
        })
    }

    /// `d phi/dx` on the x-nodes from the `k_v = 0` column of `f`.
    pub fn force(&self, coeffs: &[Complex64]) -> Vec<f64> {
        self.potential(coeffs).1
    }

    /// `phi` and `d phi/dx` on the x-nodes.
    pub fn potential(&self, coeffs: &[Complex64]) -> (Vec<f64>, Vec<f64>) {
        let nx = self.grid.nx;
        if let Some(f) = &self.force_override {
            return (vec![0.0; nx], f.clone());
        }
        let nv = self.grid.nv;
        // the k_v = 0 column is the x-transform of rho / hv
        let mut p = vec![Complex64::new(0.0, 0.0); nx];
        let mut d = vec![Complex64::new(0.0, 0.0); nx];
        for m in 1..nx {
            let rho = coeffs[m * nv] * self.grid.hv;
            let k = self.kx[m];
            // phi_hat = -l rho_hat / k^2
            p[m] = -self.coupling * rho / (k * k);
            if m != nx / 2 {
                d[m] = Complex64::new(0.0, k) * p[m];
            }
        }
        (fft::inverse_real(p), fft::inverse_real(d))
    }

    /// `-(u1 f_x + u2 f_v)` with `u1 = g - phi s'` and `u2 = s d phi/dx`, dealiased.
    pub fn eval(&self, coeffs: &[Complex64]) -> Vec<Complex64> {
        let (nx, nv) = (self.grid.nx, self.grid.nv);
        let mut fx = coeffs.to_vec();
        let mut fv = coeffs.to_vec();
        dealias_coeffs(&mut fx, nx, nv);
        dealias_coeffs(&mut fv, nx, nv);
        for i in 0..nx {
            for j in 0..nv {
                let k = i * nv + j;
                fx[k] *= Complex64::new(0.0, self.kx[i]);
                fv[k] *= Complex64::new(0.0, self.kv[j]);
            }
        }
        fft::inverse_2d(&mut fx, nx, nv);
        fft::inverse_2d(&mut fv, nx, nv);
        let (phi, e) = self.potential(coeffs);
        let mut out: Vec<Complex64> = (0..nx * nv)
            .map(|k| {
                let (i, j) = (k / nv, k % nv);
                let u1 = self.g[j] - phi[i] * self.cutoff_slope[j];
                let u2 = e[i] * self.cutoff[j];
                Complex64::new(-(u1 * fx[k].re + u2 * fv[k].re), 0.0)
            })
            .collect();
        fft::forward_2d(&mut out, nx, nv);
        dealias_coeffs(&mut out, nx, nv);
        out
    }
}

pub fn spectral_rhs(state: &SpectralState, pv: &PeriodizedVelocity, coupling: f64) -> Result<SpectralState> {
    let rhs = SpectralRhs::new(state.grid, pv, coupling)?;
    Ok(SpectralState {
        grid: state.grid,
        coeffs: rhs.eval(&state.coeffs),
        t: state.t,
    })
}

/// One step of the three-stage Kutta scheme for `y' = F(t, y)`, with `post`
/// applied to every stage value.
pub fn rk3<F, P>(y: &[Complex64], t: f64, dt: f64, rhs: F, post: P) -> Vec<Complex64>
where
    F: Fn(f64, &[Complex64]) -> Vec<Complex64>,
    P: Fn(&mut Vec<Complex64>),
{
    let axpy = |a: f64, x: &[Complex64], b: f64, z: &[Complex64], c: f64, w: &[Complex64]| {
        let mut out: Vec<Complex64> = y
            .iter()
            .zip(x)
            .zip(z)
            .zip(w)
            .map(|(((y, x), z), w)| y + x * a + z * b + w * c)
            .collect();
        post(&mut out);
        out
    };
    let zero = vec![Complex64::new(0.0, 0.0); y.len()];
    let k1 = rhs(t, y);
    let y2 = axpy(0.5 * dt, &k1, 0.0, &zero, 0.0, &zero);
    let k2 = rhs(t + 0.5 * dt, &y2);
    let y3 = axpy(-dt, &k1, 2.0 * dt, &k2, 0.0, &zero);
    let k3 = rhs(t + dt, &y3);
    axpy(dt / 6.0, &k1, 4.0 * dt / 6.0, &k2, dt / 6.0, &k3)
}

pub fn rk3_step(state: &SpectralState, dt: f64, rhs: &SpectralRhs) -> Result<SpectralState> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(CmmError::Config(format!("time step must be positive, got {dt}")));
    }
    let (nx, nv) = (state.grid.nx, state.grid.nv);
    let coeffs = rk3(
        &state.coeffs,
        state.t,
        dt,
        |_, c| rhs.eval(c),
        |c| dealias_coeffs(c, nx, nv),
    );
    if coeffs.iter().any(|c| !(c.re.is_finite() && c.im.is_finite())) {
        return Err(CmmError::BlowUp {
            step: 0,
            detail: format!("non-finite spectral coefficients at t = {}", state.t + dt),
        });
    }
    Ok(SpectralState {
        grid: state.grid,
        coeffs,
        t: state.t + dt,
    })
}

/// Largest step inside the RK3 stability region for the initial state.
pub fn stable_dt(rhs: &SpectralRhs, state: &SpectralState) -> f64 {
    let n = state.n() as f64;
    let kx = rhs.kx.iter().fold(0.0f64, |m, k| m.max(k.abs())) * 2.0 / 3.0 * n / (n - 1.0);
    let kv = rhs.kv.iter().fold(0.0f64, |m, k| m.max(k.abs())) * 2.0 / 3.0 * n / (n - 1.0);
    let gmax = rhs.g.iter().fold(0.0f64, |m, g| m.max(g.abs()));
    let emax = rhs.force(&state.coeffs).iter().fold(0.0f64, |m, e| m.max(e.abs()));
    // imaginary-axis bound of the scheme is sqrt(3); keep a margin and
    // leave room for the field to grow
    1.2 / (kx * gmax + kv * (4.0 * emax + 0.1))
}

#[derive(Debug, Clone)]
pub struct SpectralRun {
    pub records: Vec<DiagnosticsRecord>,
    pub snapshots: Vec<crate::solver::Snapshot>,
    pub final_state: SpectralState,
    pub dt: f64,
}

fn record(state: &SpectralState, rhs: &SpectralRhs, started: &Instant) -> DiagnosticsRecord {
    let f = state.to_physical();
    let m = moments(&f, &state.grid);
    let e = rhs.force(&state.coeffs);
    let e_pot = 0.5 * state.grid.hx * e.iter().map(|q| q * q).sum::<f64>();
    DiagnosticsRecord {
        t: state.t,
        mass: state.mass(),
        momentum: m.momentum,
        e_kin: m.kinetic,
        e_pot,
        e_tot: m.kinetic + e_pot,
        e_det: 0.0,
        n_submaps: 0,
        wall_s: started.elapsed().as_secs_f64(),
    }
}

/// Integrates from `t = 0` to `t_final` on the `n x n` grid of `cfg.n`.
///
/// Without an explicit `dt` the step comes from [`stable_dt`].
pub fn run_spectral(cfg: &SimulationConfig) -> Result<SpectralRun> {
    cfg.validate()?;
    let started = Instant::now();
    let grid = cfg.map_grid()?;
    let ic = cfg.initial_condition();
    let f0: Vec<f64> = grid.points().iter().map(|&(x, v)| ic.eval(x, v)).collect();
    let mut state = SpectralState::from_physical(grid, &f0, 0.0)?;
    dealias_23(&mut state);
    let pv = PeriodizedVelocity::new(cfg.lv, cfg.v_star, cfg.n)?;
    let rhs = SpectralRhs::new(grid, &pv, cfg.coupling)?;
    let limit = stable_dt(&rhs, &state);
    let nominal = cfg.dt.unwrap_or(limit);
    if nominal > limit {
        warn!("spectral dt = {nominal} exceeds the stability estimate {limit}");
    }
    let steps = (cfg.t_final / nominal - 1e-9).ceil().max(1.0) as usize;
    let dt = cfg.t_final / steps as f64;
    info!("spectral run: {steps} steps of {dt} on {}^2", cfg.n);

    let mut records = Vec::new();
    let mut snapshots = Vec::new();
    for step in 0..=steps {
        if step % cfg.diag_every == 0 || step == steps {
            records.push(record(&state, &rhs, &started));
        }
        if cfg.snapshot_every > 0 && step % cfg.snapshot_every == 0 {
            snapshots.push(crate::solver::Snapshot {
                step,
                t: state.t,
                grid,
                f: state.to_physical(),
            });
        }
        if step == steps {
            break;
        }
        state = rk3_step(&state, dt, &rhs).map_err(|e| match e {
            CmmError::BlowUp { detail, .. } => CmmError::BlowUp { step, detail },
            other => other,
        })?;
        // keep the time exact rather than accumulated
        state.t = (step + 1) as f64 * dt;
    }
    Ok(SpectralRun {
        records,
        snapshots,
        final_state: state,
        dt,
    })
}
