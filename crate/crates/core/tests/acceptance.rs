//! End-to-end acceptance checks, one PASS/FAIL line per criterion.
//!
//! `ACCEPTANCE_ONLY=1,4` restricts the run to the listed criteria.
//! `ACCEPTANCE_STRICT=1` turns any FAIL into a nonzero exit status.

mod common;

use std::f64::consts::PI;
use std::time::Instant;

use cmm_core::config::SimulationConfig;
use cmm_core::diagnostics::{radial_spectrum, recurrence_time};
use cmm_core::experiments::{
    cross_solver, damping_sweep, revival_time, spatial_convergence, spectrum_decay_orders, submap_spectra,
    temporal_convergence, two_slope_fit, ConvergenceTable,
};
use cmm_core::solver::run_cmm;
use cmm_core::spectral::run_spectral;
use cmm_core::Result;

use common::*;

struct Verdict {
    pass: bool,
    detail: String,
}

impl Verdict {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Verdict {
            pass,
            detail: detail.into(),
        }
    }
}

fn within(x: f64, target: f64, rel: f64) -> bool {
    (x - target).abs() <= rel * target.abs()
}

fn fmt_eoc(e: &[Option<f64>]) -> String {
    e.iter()
        .map(|x| x.map_or("-".to_string(), |v| format!("{v:.2}")))
        .collect::<Vec<_>>()
        .join("/")
}

/// Checks that every EOC of the named columns lies in `[lo, hi]`.
fn eoc_check(table: &ConvergenceTable, cols: &[&str], lo: f64, hi: f64) -> Verdict {
    let mut pass = true;
    let mut parts = Vec::new();
    for &c in cols {
        let e = table.eoc(c);
        pass &= e.iter().all(|x| x.map_or(false, |v| v >= lo && v <= hi));
        parts.push(format!("{c} {}", fmt_eoc(&e)));
    }
    Verdict::new(pass, format!("EOC {} (need [{lo}, {hi}])", parts.join(", ")))
}

fn linear_base() -> SimulationConfig {
    SimulationConfig {
        n_f: 512,
        n_psi: 512,
        t_final: 10.0,
        delta_det: f64::INFINITY,
        ..SimulationConfig::preset("landau-linear").unwrap()
    }
}

fn spatial_eoc() -> Result<Verdict> {
    let base = SimulationConfig {
        dt: Some(4.0 * PI / 1024.0),
        ..linear_base()
    };
    let table = spatial_convergence(&base, &[32, 64, 128, 256], 512)?;
    print!("{}", table.render());
    Ok(eoc_check(&table, &["df", "dm", "dp", "de"], 2.5, 3.6))
}

fn temporal_eoc() -> Result<Verdict> {
    let base = SimulationConfig {
        n: 256,
        n_f: 256,
        n_psi: 256,
        ..linear_base()
    };
    let table = temporal_convergence(&base, &[1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0], 1.0 / 256.0)?;
    print!("{}", table.render());
    Ok(eoc_check(&table, &["df", "dx"], 2.5, 3.4))
}

fn cross_solver_eoc() -> Result<Verdict> {
    let base = SimulationConfig {
        dt: Some(4.0 * PI / 1024.0),
        ..linear_base()
    };
    let table = cross_solver(&base, &[32, 64, 128], 256, None)?;
    print!("{}", table.render());
    Ok(eoc_check(&table, &["spectral"], 2.5, 3.6))
}

fn damping_rates() -> Result<Verdict> {
    let base = SimulationConfig {
        n: 64,
        n_psi: 1024,
        delta_det: 0.05,
        ..SimulationConfig::preset("landau-linear").unwrap()
    };
    let half = damping_sweep(&base, &[0.5])?;
    let one = damping_sweep(
        &SimulationConfig {
            t_final: 25.0,
            ..base
        },
        &[1.0],
    )?;
    let (g5, w5, g1) = (half[0].fit.gamma, half[0].fit.omega, one[0].fit.gamma);
    let pass = within(g5, -0.1569, 0.05) && within(w5, 1.3891, 0.02) && within(g1, -0.8609, 0.05);
    Ok(Verdict::new(
        pass,
        format!("gamma(0.5) = {g5:.4}, omega(0.5) = {w5:.4}, gamma(1.0) = {g1:.4}"),
    ))
}

fn nonlinear_landau() -> Result<Verdict> {
    let cfg = SimulationConfig::preset("landau-nonlinear")?;
    let run = run_cmm(&cfg)?;
    let fit = two_slope_fit(&run.records, (0.0, 15.0), (20.0, 40.0))?;
    let (g1, g2) = (fit.decay.gamma, fit.growth.gamma);
    let pass = within(g1, -0.2872, 0.10) && within(g2, 0.0865, 0.15);
    // informational: the decay rate over the first four peaks only
    let early = fit.decay.peak_times.get(3).map_or(f64::NAN, |&t4| {
        two_slope_fit(&run.records, (0.0, t4), (20.0, 40.0)).map_or(f64::NAN, |f| f.decay.gamma)
    });
    Ok(Verdict::new(
        pass,
        format!(
            "gamma1 = {g1:.4} (first four peaks {early:.4}), gamma2 = {g2:.4}, {} submaps",
            run.stack.len()
        ),
    ))
}

fn recurrence() -> Result<Verdict> {
    let base = SimulationConfig {
        eps: 0.001,
        k: 0.5,
        dt: Some(1.0 / 16.0),
        delta_det: 0.05,
        ..SimulationConfig::default()
    };
    let mut pass = true;
    let mut parts = Vec::new();
    let mut latest: f64 = 0.0;
    for nv in [64, 128] {
        let cfg = SimulationConfig {
            n: nv,
            n_f: nv,
            n_psi: nv,
            dt: None,
            ..base.clone()
        };
        let t_rec = recurrence_time(cfg.k, 2.0 * cfg.lv / nv as f64)?;
        latest = latest.max(t_rec);
        let run = run_spectral(&SimulationConfig {
            t_final: 1.5 * t_rec,
            ..cfg
        })?;
        let ts = revival_time(&run.records);
        let ok = ts.map_or(false, |t| within(t, t_rec, 0.2));
        pass &= ok;
        parts.push(format!(
            "spectral {nv}: revival at {} (t_rec {t_rec:.0})",
            ts.map_or("never".into(), |t| format!("{t:.1}"))
        ));
    }
    let t_end = 1.25 * latest;
    let cmm = run_cmm(&SimulationConfig {
        n: 64,
        n_f: 512,
        n_psi: 512,
        t_final: t_end,
        ..base
    })?;
    let ts = revival_time(&cmm.records);
    let ok = ts.map_or(true, |t| t > 1.2 * latest);
    pass &= ok;
    parts.push(format!(
        "cmm: revival at {} up to t = {t_end:.0}",
        ts.map_or("never".into(), |t| format!("{t:.1}"))
    ));
    Ok(Verdict::new(pass, parts.join("; ")))
}

fn spectral_mass() -> Result<Verdict> {
    let cfg = SimulationConfig {
        n: 128,
        t_final: 20.0,
        dt: None,
        eps: 0.5,
        ..SimulationConfig::default()
    };
    let run = run_spectral(&cfg)?;
    let m0 = run.records[0].mass;
    let worst = run
        .records
        .iter()
        .map(|r| ((r.mass - m0) / m0).abs())
        .fold(0.0, f64::max);
    Ok(Verdict::new(worst < 1e-12, format!("max relative mass drift {worst:.2e} over {} records", run.records.len())))
}

fn properties() -> Result<Verdict> {
    let mut failures = Vec::new();
    let mut check = |name: &str, ok: bool| {
        if !ok {
            failures.push(name.to_string());
        }
    };
    let pts: Vec<(f64, f64)> = (0..50)
        .map(|i| ((i as f64 * 0.618034).fract(), (i as f64 * 0.414214).fract()))
        .collect();
    check(
        "hermite cubic",
        hermite_cubic_error([0.3, -1.0, 0.5, 0.25], [1.0, 0.2, -0.7, 0.4], &pts) <= 1e-12,
    );
    for (lv, v_star, n) in [(4.0 * PI, 3.8 * PI, 1024), (5.0 * PI, 4.75 * PI, 512)] {
        let (mean, core) = extension_errors(lv, v_star, n);
        check("h zero mean", mean <= 1e-12);
        check("g = v on core", core <= 1e-8);
    }
    check("identity map", zero_velocity_drift(5) == 0.0);
    let (ev, ed) = constant_velocity_error((0.7, -0.3), 0.05, 10);
    check("constant velocity", ev < 1e-9 && ed < 1e-8);
    check("shear determinant", shear_det_error(0.8, 2, 10) < 1e-10);
    let ((lo, hi), (min0, max0)) = sampled_range(0.6, 0.4, 0.3);
    check("sampled bounds", lo >= min0 && hi <= max0);
    let (e, tol) = split_mismatch(0.5, 0.3, 10);
    check("submap split", e < tol);
    let (eg, ew) = damping_fit_errors(-0.4, 1.7);
    check("damping fit", eg < 0.01 && ew < 0.01);
    let (res, mono) = optimizer_check(&[128, 256, 512, 1024], 3.8 * PI);
    check("optimizer", res <= 1e-10 && mono);
    let detail = if failures.is_empty() {
        "all property checks hold".to_string()
    } else {
        format!("failed: {}", failures.join(", "))
    };
    Ok(Verdict::new(failures.is_empty(), detail))
}

fn two_stream() -> Result<Verdict> {
    let cfg = SimulationConfig {
        n: 64,
        n_f: 512,
        n_psi: 512,
        t_final: 40.0,
        ..SimulationConfig::preset("two-stream")?
    };
    let run = run_cmm(&cfg)?;
    let g = cfg.map_grid()?;
    let spectra = submap_spectra(&run.stack)?;
    let map_decay = spectra
        .iter()
        .flat_map(|pair| pair.iter().map(|s| spectrum_decay_orders(s, g.nx)))
        .fold(f64::INFINITY, f64::min);
    // informational: the same ratio over all radial shells, corners included
    let full_band = |sp: &[f64]| {
        let tail = &sp[(3 * sp.len()) / 4..];
        let peak = sp.iter().cloned().fold(0.0, f64::max);
        (peak / (tail.iter().sum::<f64>() / tail.len() as f64)).log10()
    };
    let map_full = spectra
        .iter()
        .flat_map(|pair| pair.iter().map(|s| full_band(s)))
        .fold(f64::INFINITY, f64::min);
    let fg = cfg.sample_grid()?;
    let fs = radial_spectrum(&run.final_f, fg.nx, fg.nv)?;
    let f_decay = spectrum_decay_orders(&fs, fg.nx);
    let ic = cfg.initial_condition();
    let f0 = move |x: f64, v: f64| ic.eval(x, v);
    let sup = ic.sup();
    let chain = cmm_core::experiments::zoom_chain(&run.stack, &f0, (0.5 * g.domain.lx, 0.0), 4.0, 3, 128)?;
    let bounded = chain
        .iter()
        .all(|(_, z)| z.iter().all(|&q| q.is_finite() && (0.0..=sup).contains(&q)));
    // broad: the sampled field keeps energy in its upper band, i.e. it decays
    // by fewer orders than the maps do
    let pass = map_decay >= 6.0 && f_decay < map_decay && bounded;
    Ok(Verdict::new(
        pass,
        format!(
            "{} maps, min map spectrum decay {map_decay:.1} orders (all shells {map_full:.1}), f spectrum decay {f_decay:.1} orders (all shells {:.1}), zoom bounded: {bounded}",
            spectra.len(),
            full_band(&fs)
        ),
    ))
}

type Criterion = (usize, &'static str, fn() -> Result<Verdict>);

fn main() {
    let criteria: [Criterion; 9] = [
        (1, "spatial convergence", spatial_eoc),
        (2, "temporal convergence", temporal_eoc),
        (3, "cross-solver convergence", cross_solver_eoc),
        (4, "Landau damping rates", damping_rates),
        (5, "nonlinear Landau two-slope fit", nonlinear_landau),
        (6, "recurrence time", recurrence),
        (7, "spectral mass conservation", spectral_mass),
        (8, "property suites", properties),
        (9, "two-stream qualitative", two_stream),
    ];
    let only: Option<Vec<usize>> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .map(|s| s.split(',').filter_map(|x| x.trim().parse().ok()).collect());
    let strict = std::env::var("ACCEPTANCE_STRICT").map_or(false, |v| v == "1");

    let mut failed = 0;
    for (id, name, run) in criteria {
        if only.as_ref().map_or(false, |o| !o.contains(&id)) {
            continue;
        }
        let start = Instant::now();
        let verdict = run().unwrap_or_else(|e| Verdict::new(false, format!("error: {e}")));
        let status = if verdict.pass { "PASS" } else { "FAIL" };
        if !verdict.pass {
            failed += 1;
        }
        println!(
            "{status} criterion {id} ({name}): {} [{:.0} s]",
            verdict.detail,
            start.elapsed().as_secs_f64()
        );
    }
    if failed > 0 && strict {
        std::process::exit(1);
    }
}
