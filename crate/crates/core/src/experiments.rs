//! Convergence sweeps, solver cross-checks and damping studies built on
//! [`run_cmm`] and [`run_spectral`].

use log::info;
use serde::{Deserialize, Serialize};

use crate::charmap::{eval_composed, sample_on_grid, zoom_eval, SubmapStack, Window};
use crate::config::SimulationConfig;
use crate::diagnostics::{
    eoc, find_peaks, fit_damping_window, linf_diff, radial_spectrum, DampingFit,
    DiagnosticsRecord,
};
use crate::error::{CmmError, Result};
use crate::grid::{Domain, Grid2D};
use crate::solver::{run_cmm, CmmRun};
use crate::spectral::run_spectral;

/// Errors of one run against the reference.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorRow {
    /// Coarse grid size or time step of the run.
    pub param: f64,
    pub df: f64,
    /// Composed-map error, over the core band only.
    pub dx: f64,
    pub dm: f64,
    pub dp: f64,
    pub de: f64,
    /// Distance to the spectral solution, when one was supplied.
    pub d_spectral: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceTable {
    pub param_name: String,
    pub rows: Vec<ErrorRow>,
}

impl ConvergenceTable {
    pub fn column(&self, name: &str) -> Vec<f64> {
        self.rows
            .iter()
            .map(|r| match name {
                "df" => r.df,
                "dx" => r.dx,
                "dm" => r.dm,
                "dp" => r.dp,
                "de" => r.de,
                "spectral" => r.d_spectral.unwrap_or(f64::NAN),
                _ => f64::NAN,
            })
            .collect()
    }

    pub fn eoc(&self, name: &str) -> Vec<Option<f64>> {
        eoc(&self.column(name))
    }

    /// Plain-text table of errors with the order of each row against the previous one.
    pub fn render(&self) -> String {
        let cols: Vec<&str> = if self.rows.iter().any(|r| r.d_spectral.is_some()) {
            vec!["df", "dx", "dm", "dp", "de", "spectral"]
        } else {
            vec!["df", "dx", "dm", "dp", "de"]
        };
        let mut out = format!("{:>12}", self.param_name);
        for c in &cols {
            out.push_str(&format!(" {:>11} {:>5}", c, "eoc"));
        }
        out.push('\n');
        let orders: Vec<Vec<Option<f64>>> = cols.iter().map(|c| self.eoc(c)).collect();
        for (i, r) in self.rows.iter().enumerate() {
            out.push_str(&format!("{:>12.6}", r.param));
            for (c, o) in cols.iter().zip(&orders) {
                let e = self.column(c)[i];
                let order = if i == 0 {
                    "-".to_string()
                } else {
                    o[i - 1].map_or("n/a".to_string(), |q| format!("{q:.2}"))
                };
                out.push_str(&format!(" {e:>11.3e} {order:>5}"));
            }
            out.push('\n');
        }
        out
    }
}

/// Largest distance between two sets of phase-space points, measured periodically.
pub fn map_linf_diff(a: &[(f64, f64)], b: &[(f64, f64)], d: &Domain) -> f64 {
    assert_eq!(a.len(), b.len());
    let wrap = |q: f64, p: f64| {
        let r = q.rem_euclid(p);
        r.min(p - r)
    };
    a.iter()
        .zip(b)
        .map(|(p, q)| wrap(p.0 - q.0, d.lx).max(wrap(p.1 - q.1, 2.0 * d.lv)))
        .fold(0.0, f64::max)
}

struct Outcome {
    f: Vec<f64>,
    /// Composed map at the sampling nodes with `|v| <= v_star`.
    map: Vec<(f64, f64)>,
    first: DiagnosticsRecord,
    last: DiagnosticsRecord,
}

fn outcome(run: CmmRun, grid: &Grid2D) -> Result<Outcome> {
    let first = *run.records.first().ok_or_else(|| CmmError::InsufficientData("no records".into()))?;
    let last = *run.records.last().unwrap_or(&first);
    Ok(Outcome {
        map: eval_composed(&run.stack, &core_points(grid)),
        f: run.final_f,
        first,
        last,
    })
}

/// Sampling nodes inside the core band. Outside it the periodized flow has a
/// strong shear that no coarse grid resolves, so map errors there say nothing
/// about the solver.
fn core_points(grid: &Grid2D) -> Vec<(f64, f64)> {
    let vs = grid.domain.v_star;
    grid.points().into_iter().filter(|p| p.1.abs() <= vs).collect()
}

fn row(param: f64, o: &Outcome, reference: &Outcome, domain: &Domain) -> ErrorRow {
    ErrorRow {
        param,
        df: linf_diff(&o.f, &reference.f),
        dx: map_linf_diff(&o.map, &reference.map, domain),
        dm: (o.last.mass - o.first.mass).abs(),
        dp: (o.last.momentum - o.first.momentum).abs(),
        de: (o.last.e_tot - o.first.e_tot).abs(),
        d_spectral: None,
    }
}

/// Runs `base` with each coarse grid size against a run on `reference_n`.
///
/// Errors are measured on the sampling grid of `base` at `t_final`.
pub fn spatial_convergence(base: &SimulationConfig, ns: &[usize], reference_n: usize) -> Result<ConvergenceTable> {
    let grid = base.sample_grid()?;
    let reference = outcome(run_cmm(&SimulationConfig { n: reference_n, ..base.clone() })?, &grid)?;
    let mut rows = Vec::new();
    for &n in ns {
        info!("spatial convergence: n = {n}");
        let o = outcome(run_cmm(&SimulationConfig { n, ..base.clone() })?, &grid)?;
        rows.push(row(n as f64, &o, &reference, &grid.domain));
    }
    Ok(ConvergenceTable {
        param_name: "n".into(),
        rows,
    })
}

/// Runs `base` with each time step against a run with `reference_dt`.
pub fn temporal_convergence(base: &SimulationConfig, dts: &[f64], reference_dt: f64) -> Result<ConvergenceTable> {
    let grid = base.sample_grid()?;
    let reference = outcome(
        run_cmm(&SimulationConfig {
            dt: Some(reference_dt),
            ..base.clone()
        })?,
        &grid,
    )?;
    let mut rows = Vec::new();
    for &dt in dts {
        info!("temporal convergence: dt = {dt}");
        let o = outcome(run_cmm(&SimulationConfig { dt: Some(dt), ..base.clone() })?, &grid)?;
        rows.push(row(dt, &o, &reference, &grid.domain));
    }
    Ok(ConvergenceTable {
        param_name: "dt".into(),
        rows,
    })
}

/// Distance between CMM runs on each coarse grid and one spectral run on
/// `spectral_n^2`, measured on the spectral grid at `t_final`.
pub fn cross_solver(
    base: &SimulationConfig,
    ns: &[usize],
    spectral_n: usize,
    spectral_dt: Option<f64>,
) -> Result<ConvergenceTable> {
    let spec_cfg = SimulationConfig {
        n: spectral_n,
        n_f: spectral_n,
        n_psi: spectral_n,
        dt: spectral_dt,
        ..base.clone()
    };
    let spec = run_spectral(&spec_cfg)?;
    let grid = spec.final_state.grid;
    let f_spec = spec.final_state.to_physical();
    let ic = base.initial_condition();
    let mut rows = Vec::new();
    for &n in ns {
        info!("cross-solver: n = {n}");
        let run = run_cmm(&SimulationConfig { n, ..base.clone() })?;
        let f = sample_on_grid(&run.stack, &move |x, v| ic.eval(x, v), &grid);
        let (first, last) = (run.records[0], *run.records.last().unwrap_or(&run.records[0]));
        rows.push(ErrorRow {
            param: n as f64,
            df: f64::NAN,
            dx: f64::NAN,
            dm: (last.mass - first.mass).abs(),
            dp: (last.momentum - first.momentum).abs(),
            de: (last.e_tot - first.e_tot).abs(),
            d_spectral: Some(linf_diff(&f, &f_spec)),
        });
    }
    Ok(ConvergenceTable {
        param_name: "n".into(),
        rows,
    })
}

fn energy_series(records: &[DiagnosticsRecord]) -> (Vec<f64>, Vec<f64>) {
    records.iter().map(|r| (r.t, r.e_pot)).unzip()
}

/// Peak threshold of the damping fits.
pub const DAMPING_THRESHOLD: f64 = 1e-17;

/// Decay range, relative to the largest peak, over which a damping fit
/// treats the energy as a single linear mode. Later peaks carry nonlinear
/// and recurrence effects.
pub const LINEAR_RANGE: f64 = 1e-3;

/// End of the linear phase: the time of the first peak below
/// `LINEAR_RANGE` times the largest peak, or infinity.
pub fn linear_phase_end(t: &[f64], e_pot: &[f64]) -> f64 {
    let peaks = find_peaks(t, e_pot, DAMPING_THRESHOLD);
    let top = peaks.iter().map(|p| p.1).fold(0.0, f64::max);
    peaks
        .iter()
        .find(|p| p.1 < LINEAR_RANGE * top)
        .map_or(f64::INFINITY, |p| p.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DampingRow {
    pub k: f64,
    pub fit: DampingFit,
}

/// Linear damping fits for each wave number, all other settings from `base`.
pub fn damping_sweep(base: &SimulationConfig, ks: &[f64]) -> Result<Vec<DampingRow>> {
    ks.iter()
        .map(|&k| {
            info!("damping sweep: k = {k}");
            let run = run_cmm(&SimulationConfig { k, ..base.clone() })?;
            let (t, e) = energy_series(&run.records);
            Ok(DampingRow {
                k,
                fit: fit_damping_window(&t, &e, DAMPING_THRESHOLD, f64::NEG_INFINITY, linear_phase_end(&t, &e))?,
            })
        })
        .collect()
}

/// Early decay and later growth rate of a nonlinear run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoSlopeFit {
    pub decay: DampingFit,
    pub growth: DampingFit,
}

pub fn two_slope_fit(records: &[DiagnosticsRecord], decay: (f64, f64), growth: (f64, f64)) -> Result<TwoSlopeFit> {
    let (t, e) = energy_series(records);
    Ok(TwoSlopeFit {
        decay: fit_damping_window(&t, &e, DAMPING_THRESHOLD, decay.0, decay.1)?,
        growth: fit_damping_window(&t, &e, DAMPING_THRESHOLD, growth.0, growth.1)?,
    })
}

/// Time of the first revival that ends the exponential decay of `E_pot`.
///
/// A revival starts at the first peak exceeding ten times the smallest
/// earlier peak and lasts while the peaks stay above that level; the result
/// is the time of its largest peak. `None` if the envelope never rises.
pub fn revival_time(records: &[DiagnosticsRecord]) -> Option<f64> {
    let (t, e) = energy_series(records);
    let peaks = find_peaks(&t, &e, 0.0);
    let mut floor = f64::INFINITY;
    let mut start = None;
    for (i, &(_, p)) in peaks.iter().enumerate() {
        if p > 10.0 * floor {
            start = Some(i);
            break;
        }
        floor = floor.min(p);
    }
    let episode = peaks[start?..].iter().take_while(|p| p.1 > 10.0 * floor);
    episode.max_by(|a, b| a.1.total_cmp(&b.1)).map(|p| p.0)
}

/// Decay in orders of magnitude of a radial spectrum: the largest shell
/// against the mean of the shells in the top quarter of the resolved band.
pub fn spectrum_decay_orders(spectrum: &[f64], n: usize) -> f64 {
    let kmax = n / 2;
    let tail: Vec<f64> = spectrum[(3 * kmax) / 4..=kmax].to_vec();
    let tail_mean = tail.iter().sum::<f64>() / tail.len() as f64;
    let peak = spectrum.iter().cloned().fold(0.0, f64::max);
    (peak / tail_mean.max(f64::MIN_POSITIVE)).log10()
}

/// Radial spectra of the two displacement components of every submap,
/// including the active one.
pub fn submap_spectra(stack: &SubmapStack) -> Result<Vec<[Vec<f64>; 2]>> {
    stack
        .stored
        .iter()
        .chain(std::iter::once(&stack.active))
        .map(|m| {
            let g = m.grid();
            let nodes = |f: &crate::hermite::HermiteField2D| -> Vec<f64> {
                (0..g.len()).map(|k| f.node(k).value).collect()
            };
            Ok([
                radial_spectrum(&nodes(&m.disp_x), g.nx, g.nv)?,
                radial_spectrum(&nodes(&m.disp_v), g.nx, g.nv)?,
            ])
        })
        .collect()
}

/// `f` on successively zoomed windows around `(xc, vc)`, each `factor`
/// times smaller than the last, starting from the full domain.
pub fn zoom_chain(
    stack: &SubmapStack,
    f0: &(impl Fn(f64, f64) -> f64 + Sync),
    center: (f64, f64),
    factor: f64,
    levels: usize,
    resolution: usize,
) -> Result<Vec<(Window, Vec<f64>)>> {
    let d = *stack.domain();
    let mut w = Window::centered(center.0, center.1, 0.5 * d.lx, d.lv);
    let mut out = Vec::with_capacity(levels);
    for _ in 0..levels {
        w = w.zoomed(factor);
        out.push((w, zoom_eval(stack, f0, w, resolution, resolution)?));
    }
    Ok(out)
}
