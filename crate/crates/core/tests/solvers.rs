use cmm_core::config::{IcKind, SimulationConfig};
use cmm_core::diagnostics::linf_diff;
use cmm_core::solver::run_cmm;
use cmm_core::spectral::run_spectral;

fn short_landau() -> SimulationConfig {
    SimulationConfig {
        n: 64,
        n_f: 64,
        n_psi: 64,
        dt: Some(1.0 / 32.0),
        t_final: 2.0,
        delta_det: f64::INFINITY,
        ..SimulationConfig::default()
    }
}

#[test]
fn cmm_and_spectral_agree_on_short_runs() {
    for cfg in [
        short_landau(),
        SimulationConfig {
            ic: IcKind::TwoStream,
            k: 0.2,
            v0: 3.0,
            lv: 5.0 * std::f64::consts::PI,
            v_star: 4.75 * std::f64::consts::PI,
            ..short_landau()
        },
    ] {
        let cmm = run_cmm(&cfg).unwrap();
        let spec = run_spectral(&SimulationConfig { dt: Some(1.0 / 128.0), ..cfg.clone() }).unwrap();
        let f_spec = spec.final_state.to_physical();
        assert_eq!(f_spec.len(), cmm.final_f.len());
        let d = linf_diff(&cmm.final_f, &f_spec);
        assert!(d < 1e-4, "{:?}: {d:e}", cfg.ic);

        // same force: the potential energies track each other
        assert_eq!(cmm.records.len(), 65);
        let scale = spec.records.iter().map(|r| r.e_pot).fold(0.0, f64::max);
        for (a, b) in cmm.records.iter().zip(spec.records.iter().step_by(4)) {
            assert!((a.t - b.t).abs() < 1e-12);
            assert!((a.e_pot - b.e_pot).abs() <= 5e-3 * scale, "t = {}: {} vs {}", a.t, a.e_pot, b.e_pot);
        }
    }
}

fn nonlinear_drift(n: usize) -> (f64, f64, f64) {
    let cfg = SimulationConfig {
        eps: 0.5,
        t_final: 5.0,
        n,
        n_f: n,
        n_psi: n,
        ..short_landau()
    };
    let run = run_cmm(&cfg).unwrap();
    let (first, last) = (run.records[0], *run.records.last().unwrap());
    let dm = ((last.mass - first.mass) / first.mass).abs();
    let de = ((last.e_tot - first.e_tot) / first.e_tot).abs();
    (dm, de, last.momentum)
}

// Mass and energy are not conserved exactly; the drift must shrink with the grid.
#[test]
fn cmm_conservation_drift_shrinks_with_resolution() {
    let (dm64, de64, p64) = nonlinear_drift(64);
    let (dm128, de128, p128) = nonlinear_drift(128);
    assert!(dm128 < 1e-4 && de128 < 1e-3, "mass {dm128:e}, energy {de128:e}");
    assert!(dm128 < dm64 / 4.0, "mass {dm64:e} -> {dm128:e}");
    assert!(de128 < de64 / 4.0, "energy {de64:e} -> {de128:e}");
    // symmetric data: momentum stays at round-off
    assert!(p64.abs() < 1e-9 && p128.abs() < 1e-9, "momentum {p64:e} {p128:e}");
}

#[test]
fn runs_are_deterministic_apart_from_wall_time() {
    let cfg = SimulationConfig {
        t_final: 0.5,
        ..short_landau()
    };
    let strip = |mut r: cmm_core::diagnostics::DiagnosticsRecord| {
        r.wall_s = 0.0;
        r
    };
    let a = run_cmm(&cfg).unwrap();
    let b = run_cmm(&cfg).unwrap();
    assert!(a.final_f.iter().zip(&b.final_f).all(|(x, y)| x.to_bits() == y.to_bits()));
    let ra: Vec<_> = a.records.into_iter().map(strip).collect();
    let rb: Vec<_> = b.records.into_iter().map(strip).collect();
    assert_eq!(ra, rb);
}
