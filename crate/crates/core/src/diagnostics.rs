//! Conserved quantities, error norms, convergence orders, spectra and
//! damping-rate fits.

use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{CmmError, Result};
use crate::fft;
use crate::fields::ScalarProfile1D;
use crate::grid::Grid2D;

/// One line of the per-step diagnostics series.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct DiagnosticsRecord {
    pub t: f64,
    pub mass: f64,
    pub momentum: f64,
    pub e_kin: f64,
    pub e_pot: f64,
    pub e_tot: f64,
    pub e_det: f64,
    pub n_submaps: usize,
    pub wall_s: f64,
}

/// Mass, momentum and kinetic energy of a sampled distribution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments {
    pub mass: f64,
    pub momentum: f64,
    pub kinetic: f64,
}

/// Rectangle-rule moments of `f` (grid order) over the phase-space grid.
pub fn moments(f: &[f64], grid: &Grid2D) -> Moments {
    assert_eq!(f.len(), grid.len(), "samples do not match the grid");
    let v = grid.v_nodes();
    let (mut m, mut p, mut e) = (0.0, 0.0, 0.0);
    for row in f.chunks_exact(grid.nv) {
        for (fj, vj) in row.iter().zip(&v) {
            m += fj;
            p += vj * fj;
            e += 0.5 * vj * vj * fj;
        }
    }
    let cell = grid.hx * grid.hv;
    Moments {
        mass: m * cell,
        momentum: p * cell,
        kinetic: e * cell,
    }
}

/// `(hx / 2) sum (d phi/dx)^2`.
pub fn potential_energy(dphi_dx: &ScalarProfile1D) -> f64 {
    0.5 * dphi_dx.hx() * dphi_dx.values.iter().map(|e| e * e).sum::<f64>()
}

/// Deviation of the conserved quantities from the first record.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConservationErrors {
    pub t: f64,
    pub mass: f64,
    pub momentum: f64,
    pub energy: f64,
    pub rel_mass: f64,
    pub rel_energy: f64,
}

pub fn conservation_errors(series: &[DiagnosticsRecord]) -> Result<Vec<ConservationErrors>> {
    let first = series
        .first()
        .ok_or_else(|| CmmError::InsufficientData("empty diagnostics series".into()))?;
    Ok(series
        .iter()
        .map(|r| {
            let (dm, de) = ((r.mass - first.mass).abs(), (r.e_tot - first.e_tot).abs());
            ConservationErrors {
                t: r.t,
                mass: dm,
                momentum: (r.momentum - first.momentum).abs(),
                energy: de,
                rel_mass: dm / first.mass.abs(),
                rel_energy: de / first.e_tot.abs(),
            }
        })
        .collect())
}

/// Largest absolute deviations over the whole series.
pub fn max_conservation_errors(series: &[DiagnosticsRecord]) -> Result<ConservationErrors> {
    let all = conservation_errors(series)?;
    let mut out = all[0];
    for e in &all {
        out.t = e.t;
        out.mass = out.mass.max(e.mass);
        out.momentum = out.momentum.max(e.momentum);
        out.energy = out.energy.max(e.energy);
        out.rel_mass = out.rel_mass.max(e.rel_mass);
        out.rel_energy = out.rel_energy.max(e.rel_energy);
    }
    Ok(out)
}

/// `log2(e_n / e_{n+1})` for consecutive errors of a dyadic sequence.
///
/// Entries are `None` where either error is zero, negative or not finite.
pub fn eoc(errors: &[f64]) -> Vec<Option<f64>> {
    errors
        .windows(2)
        .map(|w| {
            let ok = |e: f64| e > 0.0 && e.is_finite();
            (ok(w[0]) && ok(w[1])).then(|| (w[0] / w[1]).log2())
        })
        .collect()
}

/// Maximum pointwise difference of two equally sized sample sets.
pub fn linf_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max)
}

/// Shell sums of `|F[f](k)| / (nx nv)` over integer shells `round(|k|)`.
///
/// Wave numbers are mode indices, so the shell of `(3, 4)` is 5.
pub fn radial_spectrum(f: &[f64], nx: usize, nv: usize) -> Result<Vec<f64>> {
    if nx != nv || f.len() != nx * nv {
        return Err(CmmError::Config(format!(
            "radial spectrum needs a square grid, got {nx} x {nv} with {} samples",
            f.len()
        )));
    }
    let mut buf: Vec<Complex64> = f.iter().map(|&r| Complex64::new(r, 0.0)).collect();
    fft::forward_2d(&mut buf, nx, nv);
    let kmax = (nx / 2) as f64;
    let shells = (kmax * 2f64.sqrt()).round() as usize + 1;
    let mut out = vec![0.0; shells];
    let scale = 1.0 / (nx * nv) as f64;
    for a in 0..nx {
        let kx = fft::signed_mode(a, nx) as f64;
        for b in 0..nv {
            let kv = fft::signed_mode(b, nv) as f64;
            let s = kx.hypot(kv).round() as usize;
            out[s] += buf[a * nv + b].norm() * scale;
        }
    }
    Ok(out)
}

/// Result of fitting an exponentially modulated oscillation to energy peaks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DampingFit {
    /// Field damping rate: half the slope of `ln E_pot` at the peaks.
    pub gamma: f64,
    /// Field frequency: `pi` over the mean peak spacing.
    pub omega: f64,
    pub intercept: f64,
    pub peak_times: Vec<f64>,
    pub peak_values: Vec<f64>,
    /// Root-mean-square residual of the log-linear fit.
    pub residual: f64,
}

/// Strict three-point local maxima of `e` with value at least `threshold`,
/// excluding the first sample.
pub fn find_peaks(t: &[f64], e: &[f64], threshold: f64) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    for i in 1..e.len().saturating_sub(1) {
        if e[i] > e[i - 1] && e[i] > e[i + 1] && e[i] >= threshold {
            out.push((t[i], e[i]));
        }
    }
    out
}

/// Fits `E_pot` peaks above `threshold`.
pub fn fit_damping(t: &[f64], e_pot: &[f64], threshold: f64) -> Result<DampingFit> {
    fit_damping_window(t, e_pot, threshold, f64::NEG_INFINITY, f64::INFINITY)
}

/// [`fit_damping`] restricted to peaks with `t_min <= t <= t_max`.
pub fn fit_damping_window(
    t: &[f64],
    e_pot: &[f64],
    threshold: f64,
    t_min: f64,
    t_max: f64,
) -> Result<DampingFit> {
    if t.len() != e_pot.len() {
        return Err(CmmError::Config("time and energy series differ in length".into()));
    }
    let peaks: Vec<(f64, f64)> = find_peaks(t, e_pot, threshold)
        .into_iter()
        .filter(|&(tp, _)| tp >= t_min && tp <= t_max)
        .collect();
    if peaks.len() < 3 {
        return Err(CmmError::InsufficientData(format!(
            "need at least 3 peaks above {threshold:e}, found {}",
            peaks.len()
        )));
    }
    let n = peaks.len() as f64;
    let xs: Vec<f64> = peaks.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = peaks.iter().map(|p| p.1.ln()).collect();
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual = (xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    let spacing = (xs[xs.len() - 1] - xs[0]) / (n - 1.0);
    Ok(DampingFit {
        gamma: 0.5 * slope,
        omega: std::f64::consts::PI / spacing,
        intercept,
        peak_times: xs,
        peak_values: peaks.iter().map(|p| p.1).collect(),
        residual,
    })
}

/// `2 pi / (k dv)`: time at which a velocity grid of spacing `dv` revives a mode `k`.
pub fn recurrence_time(k: f64, dv: f64) -> Result<f64> {
    if !(k > 0.0 && dv > 0.0) {
        return Err(CmmError::Config(format!("need k > 0 and dv > 0, got {k}, {dv}")));
    }
    Ok(2.0 * std::f64::consts::PI / (k * dv))
}
