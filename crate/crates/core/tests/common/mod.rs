//! Property checks shared by the proptest suite and the acceptance binary.
//! Each returns the measured quantity so callers choose the tolerance.

#![allow(dead_code)]

use std::f64::consts::PI;

use cmm_core::charmap::{advect_map_step, identity_map, sample_on_grid, Analytic, Steady, StepOptions, SubmapStack};
use cmm_core::diagnostics::fit_damping;
use cmm_core::ic::ic_landau;
use cmm_core::periodization::optimize_extension;
use cmm_core::{build_grid, Domain, Grid2D, HermiteField2D, Jet, PeriodizedVelocity};

pub fn landau_grid(n: usize) -> Grid2D {
    build_grid(Domain::new(4.0 * PI, 4.0 * PI, 3.8 * PI, 1.0).unwrap(), n, n).unwrap()
}

fn cubic(c: &[f64; 4], y: f64) -> (f64, f64) {
    let p = c[0] + y * (c[1] + y * (c[2] + y * c[3]));
    let dp = c[1] + y * (2.0 * c[2] + y * 3.0 * c[3]);
    (p, dp)
}

/// Worst relative error of the Hermite interpolant of `p(x) q(v)`, with `p`
/// and `q` cubics, at points `(s, r)` given as fractions of the interior.
pub fn hermite_cubic_error(px: [f64; 4], qv: [f64; 4], samples: &[(f64, f64)]) -> f64 {
    let d = Domain::new(2.0 * PI, PI, 0.9 * PI, 1.0).unwrap();
    let g = build_grid(d, 16, 16).unwrap();
    let f = HermiteField2D::from_jet_fn(g, |x, v| {
        let (p, dp) = cubic(&px, x);
        let (q, dq) = cubic(&qv, v);
        Jet {
            value: p * q,
            dx: dp * q,
            dv: p * dq,
            dxv: dp * dq,
        }
    });
    // stay off the cells that wrap around the period
    let (x0, x1) = (0.0, d.lx - g.hx);
    let (v0, v1) = (-d.lv, d.lv - g.hv);
    samples
        .iter()
        .map(|&(s, r)| {
            let (x, v) = (x0 + s * (x1 - x0), v0 + r * (v1 - v0));
            let exact = cubic(&px, x).0 * cubic(&qv, v).0;
            (f.eval(x, v) - exact).abs() / exact.abs().max(1.0)
        })
        .fold(0.0, f64::max)
}

/// Mean of the sampled extension `h` and the worst `|g - v|` on the core.
pub fn extension_errors(lv: f64, v_star: f64, nv: usize) -> (f64, f64) {
    let pv = PeriodizedVelocity::new(lv, v_star, nv).unwrap();
    let mean = pv.h.iter().sum::<f64>() / nv as f64;
    let core = (0..nv)
        .map(|j| pv.v(j))
        .zip(&pv.g)
        .filter(|(v, _)| v.abs() <= v_star)
        .map(|(v, g)| (g - v).abs())
        .fold(0.0, f64::max);
    (mean.abs(), core)
}

/// Deviation from the exact translation after `steps` steps of a constant
/// velocity: worst node value error and worst derivative error. Derivatives
/// come from an `eps`-stencil and carry round-off of order `1e-16 L / eps`.
pub fn constant_velocity_error(c: (f64, f64), dt: f64, steps: usize) -> (f64, f64) {
    let g = landau_grid(16);
    let u = Steady(move |_: f64, _: f64| c);
    let mut m = identity_map(g, 0.0);
    for n in 1..=steps {
        m = advect_map_step(&m, &u, n as f64 * dt, dt, StepOptions::default()).unwrap();
    }
    let t = dt * steps as f64;
    let (mut ev, mut ed): (f64, f64) = (0.0, 0.0);
    for k in 0..g.len() {
        ev = ev
            .max((m.disp_x.value[k] + c.0 * t).abs())
            .max((m.disp_v.value[k] + c.1 * t).abs());
        for q in [m.disp_x.dx[k], m.disp_x.dv[k], m.disp_v.dx[k], m.disp_v.dv[k]] {
            ed = ed.max(q.abs());
        }
    }
    (ev, ed)
}

/// Largest node value after advecting the identity with zero velocity.
pub fn zero_velocity_drift(steps: usize) -> f64 {
    let g = landau_grid(16);
    let u = Steady(|_: f64, _: f64| (0.0, 0.0));
    let mut m = identity_map(g, 0.0);
    for n in 1..=steps {
        m = advect_map_step(&m, &u, n as f64 * 0.1, 0.1, StepOptions::default()).unwrap();
    }
    m.disp_x.value.iter().chain(&m.disp_v.value).fold(0.0, |a, b| a.max(b.abs()))
}

/// Jacobian determinant error of the map advected by the shear `u1 = A sin(m pi v / lv)`.
pub fn shear_det_error(amp: f64, mode: u32, steps: usize) -> f64 {
    let g = landau_grid(32);
    let w = mode as f64 * PI / g.domain.lv;
    let u = Steady(move |_: f64, v: f64| (amp * (w * v).sin(), 0.0));
    let mut m = identity_map(g, 0.0);
    let dt = 0.1;
    for n in 1..=steps {
        m = advect_map_step(&m, &u, n as f64 * dt, dt, StepOptions::default()).unwrap();
    }
    m.jacobian_det_error()
}

fn wavy_flow(a: f64, b: f64) -> Analytic<impl Fn(f64, f64, f64) -> (f64, f64) + Clone + Sync> {
    Analytic(move |x: f64, v: f64, t: f64| (a * (0.5 * v).sin(), b * (0.5 * x).sin() * (1.0 + 0.5 * t)))
}

/// `(min, max)` of the Landau distribution sampled through an advected map,
/// and the bounds of `f0`.
pub fn sampled_range(a: f64, b: f64, eps: f64) -> ((f64, f64), (f64, f64)) {
    let g = landau_grid(16);
    let mut s = SubmapStack::new(g, 0.0, 4);
    let u = wavy_flow(a, b);
    let dt = 0.1;
    for n in 1..=10 {
        s.active = advect_map_step(&s.active, &u, n as f64 * dt, dt, StepOptions::default()).unwrap();
    }
    let ic = ic_landau(eps, 0.5).unwrap();
    let fine = landau_grid(32);
    let f = sample_on_grid(&s, &move |x, v| ic.eval(x, v), &fine);
    let lo = f.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = f.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    ((lo, hi), (0.0, ic.sup()))
}

/// Worst distance between the composed map of a run split at `split_at`
/// and the unsplit run, together with the cubed grid spacing.
pub fn split_mismatch(a: f64, b: f64, split_at: usize) -> (f64, f64) {
    let g = landau_grid(32);
    let u = wavy_flow(a, b);
    let dt = 0.05;
    let opts = StepOptions::default();
    let mut whole = SubmapStack::new(g, 0.0, 4);
    let mut split = SubmapStack::new(g, 0.0, 4);
    for n in 1..=20 {
        let t = n as f64 * dt;
        whole.active = advect_map_step(&whole.active, &u, t, dt, opts).unwrap();
        split.active = advect_map_step(&split.active, &u, t, dt, opts).unwrap();
        if n == split_at {
            assert!(split.remap_if_needed(1e-300).unwrap().remapped);
        }
    }
    let mut e: f64 = 0.0;
    for (x, v) in g.points() {
        let (p, q) = (whole.eval(x + 0.1, v + 0.2), split.eval(x + 0.1, v + 0.2));
        let dx = (p.0 - q.0).rem_euclid(g.domain.lx);
        e = e.max(dx.min(g.domain.lx - dx)).max((p.1 - q.1).abs());
    }
    let h = g.hx.max(g.hv);
    (e, h * h * h)
}

/// Relative errors of the fitted rate and frequency of `exp(2 gamma t) cos^2(omega t)`.
pub fn damping_fit_errors(gamma: f64, omega: f64) -> (f64, f64) {
    let t: Vec<f64> = (0..=6000).map(|i| i as f64 * 0.005).collect();
    let e: Vec<f64> = t
        .iter()
        .map(|&t| (2.0 * gamma * t).exp() * (omega * t).cos().powi(2))
        .collect();
    let fit = fit_damping(&t, &e, 1e-17).unwrap();
    ((fit.gamma - gamma).abs() / gamma.abs(), (fit.omega - omega).abs() / omega)
}

/// Largest optimizer residual over `ns` and whether the chosen width
/// decreases strictly with the grid size.
pub fn optimizer_check(ns: &[usize], v_star: f64) -> (f64, bool) {
    let mut worst: f64 = 0.0;
    let mut prev = f64::INFINITY;
    let mut monotone = true;
    for &n in ns {
        let c = optimize_extension(n, v_star).unwrap();
        worst = worst.max(c.residual.abs());
        monotone &= c.a < prev;
        prev = c.a;
    }
    (worst, monotone)
}
