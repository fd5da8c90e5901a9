//! Time stepping of the coupled map / Poisson system.

use std::sync::Arc;
use std::time::Instant;

use log::{debug, info, warn};

use crate::charmap::{advect_map_step, sample_on_grid, SubmapStack, VelocityHistory};
use crate::config::SimulationConfig;
use crate::diagnostics::{moments, potential_energy, DiagnosticsRecord};
use crate::error::{CmmError, Result};
use crate::fields::{
    assemble_stream_shared, charge_density, solve_poisson, zero_pad_upsample, PoissonSolution,
    StreamFunctionField, VelocityProfile,
};
use crate::grid::Grid2D;
use crate::ic::InitialCondition;
use crate::periodization::PeriodizedVelocity;

/// Mass allowed in the band `|v| > v_star` before the run is flagged.
pub const SUPPORT_EXIT_TOL: f64 = 1e-8;

/// Distribution sampled on the fine grid at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub step: usize,
    pub t: f64,
    pub grid: Grid2D,
    pub f: Vec<f64>,
}

/// Everything derived from one sampling of the map.
struct Sampled {
    f: Vec<f64>,
    poisson: PoissonSolution,
}

pub struct CmmSolver {
    cfg: SimulationConfig,
    ic: InitialCondition,
    map_grid: Grid2D,
    sample_grid: Grid2D,
    psi_grid: Grid2D,
    profile: Arc<VelocityProfile>,
    stack: SubmapStack,
    history: VelocityHistory,
    step: usize,
    n_steps: usize,
    dt: f64,
    started: Instant,
    support_warned: bool,
}

impl CmmSolver {
    pub fn new(cfg: SimulationConfig) -> Result<Self> {
        cfg.validate()?;
        let ic = cfg.initial_condition();
        let map_grid = cfg.map_grid()?;
        let sample_grid = cfg.sample_grid()?;
        let psi_grid = cfg.psi_grid()?;
        let pv = PeriodizedVelocity::new(cfg.lv, cfg.v_star, cfg.n_psi)?;
        let tail = ic.tail_max(cfg.v_star);
        if tail > 1e-10 {
            warn!("initial distribution is not negligible outside |v| <= v_star (max {tail:e})");
        }
        let (n_steps, dt) = cfg.schedule();
        if (dt - cfg.nominal_dt()).abs() > 1e-12 * dt {
            info!("time step adjusted from {} to {dt} to divide t_final", cfg.nominal_dt());
        }
        Ok(CmmSolver {
            stack: SubmapStack::new(map_grid, 0.0, cfg.max_submaps),
            profile: Arc::new(VelocityProfile::new(&pv)),
            history: VelocityHistory::new(),
            cfg,
            ic,
            map_grid,
            sample_grid,
            psi_grid,
            step: 0,
            n_steps,
            dt,
            started: Instant::now(),
            support_warned: false,
        })
    }

    pub fn config(&self) -> &SimulationConfig {
        &self.cfg
    }

    pub fn stack(&self) -> &SubmapStack {
        &self.stack
    }

    pub fn into_stack(self) -> SubmapStack {
        self.stack
    }

    pub fn map_grid(&self) -> &Grid2D {
        &self.map_grid
    }

    pub fn sample_grid(&self) -> &Grid2D {
        &self.sample_grid
    }

    pub fn initial_condition(&self) -> &InitialCondition {
        &self.ic
    }

    pub fn step_index(&self) -> usize {
        self.step
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn time(&self) -> f64 {
        self.step as f64 * self.dt
    }

    pub fn is_done(&self) -> bool {
        self.step >= self.n_steps
    }

    /// `f` on the sampling grid at the current time.
    pub fn sample(&self) -> Vec<f64> {
        let ic = self.ic;
        sample_on_grid(&self.stack, &move |x, v| ic.eval(x, v), &self.sample_grid)
    }

    fn sample_and_solve(&mut self) -> Result<Sampled> {
        let f = self.sample();
        if let Some(bad) = f.iter().position(|q| !q.is_finite()) {
            return Err(self.blow_up(format!("non-finite distribution at sample {bad}")));
        }
        self.check_support(&f)?;
        let rho = charge_density(&f, &self.sample_grid);
        let poisson = solve_poisson(&rho, self.cfg.coupling)?;
        Ok(Sampled { f, poisson })
    }

    fn check_support(&mut self, f: &[f64]) -> Result<()> {
        let g = &self.sample_grid;
        let v_star = self.cfg.v_star;
        let outside: f64 = f
            .chunks_exact(g.nv)
            .map(|row| {
                row.iter()
                    .enumerate()
                    .filter(|&(j, _)| g.v(j).abs() > v_star)
                    .map(|(_, q)| q)
                    .sum::<f64>()
            })
            .sum::<f64>()
            * g.hx
            * g.hv;
        if outside > SUPPORT_EXIT_TOL {
            if self.cfg.abort_on_support_exit {
                return Err(CmmError::SupportExit {
                    t: self.time(),
                    mass: outside,
                });
            }
            if !self.support_warned {
                warn!(
                    "distribution leaves |v| <= v_star at t = {}: mass {outside:e} outside; results past this point need a reinitialized map",
                    self.time()
                );
                self.support_warned = true;
            }
        }
        Ok(())
    }

    fn stream_from(&self, poisson: &PoissonSolution) -> Result<StreamFunctionField> {
        let n = self.cfg.n_psi;
        let phi = zero_pad_upsample(&poisson.phi, n)?;
        let dphi = zero_pad_upsample(&poisson.dphi_dx, n)?;
        assemble_stream_shared(&phi, &dphi, Arc::clone(&self.profile), &self.psi_grid)
    }

    fn record(&self, s: &Sampled) -> DiagnosticsRecord {
        let m = moments(&s.f, &self.sample_grid);
        let e_pot = potential_energy(&s.poisson.dphi_dx);
        DiagnosticsRecord {
            t: self.time(),
            mass: m.mass,
            momentum: m.momentum,
            e_kin: m.kinetic,
            e_pot,
            e_tot: m.kinetic + e_pot,
            e_det: self.stack.active.core_det_error(),
            n_submaps: self.stack.len(),
            wall_s: self.started.elapsed().as_secs_f64(),
        }
    }

    fn blow_up(&self, detail: String) -> CmmError {
        CmmError::BlowUp {
            step: self.step,
            detail,
        }
    }

    fn relabel(&self, e: CmmError) -> CmmError {
        match e {
            CmmError::BlowUp { detail, .. } => self.blow_up(detail),
            other => other,
        }
    }

    /// Samples the current state, then advances by one step.
    ///
    /// Returns the diagnostics and the sampled distribution at the time
    /// before the step. The first step is done twice: once with the
    /// initial velocity held fixed and again with the velocity interpolated
    /// towards the predicted end state, which keeps the start-up error at
    /// third order.
    pub fn advance(&mut self) -> Result<(DiagnosticsRecord, Vec<f64>)> {
        if self.is_done() {
            return Err(CmmError::State("run already reached t_final".into()));
        }
        let sampled = self.sample_and_solve()?;
        let rec = self.record(&sampled);
        let t = self.time();
        let t_new = t + self.dt;
        self.history.push(t, self.stream_from(&sampled.poisson)?)?;
        let opts = self.cfg.step_options();

        let next = if self.step == 0 {
            let predicted = advect_map_step(&self.stack.active, &self.history, t_new, self.dt, opts)
                .map_err(|e| self.relabel(e))?;
            let saved = std::mem::replace(&mut self.stack.active, predicted);
            let probe = self.sample_and_solve();
            let predicted = std::mem::replace(&mut self.stack.active, saved);
            drop(predicted);
            let probe = probe?;
            let mut trial = self.history.clone();
            trial.push(t_new, self.stream_from(&probe.poisson)?)?;
            advect_map_step(&self.stack.active, &trial, t_new, self.dt, opts)
        } else {
            advect_map_step(&self.stack.active, &self.history, t_new, self.dt, opts)
        }
        .map_err(|e| self.relabel(e))?;
        if !next.is_finite() {
            return Err(self.blow_up(format!("non-finite map at t = {t_new}")));
        }
        self.stack.active = next;
        self.step += 1;
        let outcome = self.stack.remap_checked(self.cfg.delta_det, self.cfg.map_age_limit())?;
        if outcome.remapped {
            debug!(
                "remap at t = {:.6} (e_det = {:.3e}), {} submaps",
                self.time(),
                outcome.e_det,
                self.stack.len()
            );
        }
        Ok((rec, sampled.f))
    }

    /// Diagnostics and samples at the current time without stepping.
    pub fn observe(&mut self) -> Result<(DiagnosticsRecord, Vec<f64>)> {
        let s = self.sample_and_solve()?;
        Ok((self.record(&s), s.f))
    }

    fn snapshot(&self, step: usize, t: f64, f: Vec<f64>) -> Snapshot {
        Snapshot {
            step,
            t,
            grid: self.sample_grid,
            f,
        }
    }
}

/// Output of a full run.
#[derive(Debug, Clone)]
pub struct CmmRun {
    pub stack: SubmapStack,
    pub records: Vec<DiagnosticsRecord>,
    pub snapshots: Vec<Snapshot>,
    /// Distribution on the sampling grid at `t_final`.
    pub final_f: Vec<f64>,
    pub dt: f64,
}

/// Runs to `t_final`, calling `on_snapshot` for every snapshot instead of
/// keeping them.
pub fn run_cmm_with<S>(cfg: &SimulationConfig, mut on_snapshot: S) -> Result<CmmRun>
where
    S: FnMut(&Snapshot) -> Result<()>,
{
    let mut solver = CmmSolver::new(cfg.clone())?;
    let every = cfg.snapshot_every;
    let mut records = Vec::new();
    info!(
        "cmm run: {} steps of {} on grids {}/{}/{}",
        solver.n_steps(),
        solver.dt(),
        cfg.n,
        cfg.n_f,
        cfg.n_psi
    );
    while !solver.is_done() {
        let step = solver.step_index();
        let t = solver.time();
        let (rec, f) = solver.advance()?;
        if step % cfg.diag_every == 0 {
            records.push(rec);
        }
        if every > 0 && step % every == 0 {
            on_snapshot(&solver.snapshot(step, t, f))?;
        }
    }
    let (rec, f) = solver.observe()?;
    records.push(rec);
    let step = solver.step_index();
    if every > 0 && step % every == 0 {
        on_snapshot(&solver.snapshot(step, solver.time(), f.clone()))?;
    }
    let dt = solver.dt();
    Ok(CmmRun {
        stack: solver.into_stack(),
        records,
        snapshots: Vec::new(),
        final_f: f,
        dt,
    })
}

/// Runs to `t_final`, keeping snapshots in memory.
pub fn run_cmm(cfg: &SimulationConfig) -> Result<CmmRun> {
    let mut snaps = Vec::new();
    let mut run = run_cmm_with(cfg, |s| {
        snaps.push(s.clone());
        Ok(())
    })?;
    run.snapshots = snaps;
    Ok(run)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::IcKind;

    fn small(eps: f64) -> SimulationConfig {
        SimulationConfig {
            eps,
            n: 16,
            n_f: 32,
            n_psi: 64,
            dt: Some(0.1),
            t_final: 1.0,
            ..Default::default()
        }
    }

    #[test]
    fn equilibrium_stays_put() {
        let cfg = SimulationConfig {
            t_final: 10.0,
            ..small(0.0)
        };
        let mut solver = CmmSolver::new(cfg).unwrap();
        let mut max_force: f64 = 0.0;
        while !solver.is_done() {
            let s = solver.sample_and_solve().unwrap();
            let f = s.poisson.dphi_dx.values.iter().fold(0.0f64, |m, q| m.max(q.abs()));
            max_force = max_force.max(f);
            solver.advance().unwrap();
        }
        assert!(max_force < 1e-12, "{max_force:e}");
        let run = run_cmm(&small(0.0)).unwrap();
        assert!(run.records.iter().all(|r| r.e_pot < 1e-25));
    }

    #[test]
    fn sampled_distribution_stays_in_bounds() {
        let cfg = small(0.5);
        let sup = cfg.initial_condition().sup();
        let run = run_cmm(&SimulationConfig {
            snapshot_every: 5,
            ..cfg
        })
        .unwrap();
        assert_eq!(run.snapshots.len(), 3);
        for s in &run.snapshots {
            assert!(s.f.iter().all(|&q| (0.0..=sup).contains(&q)));
        }
        assert!(run.final_f.iter().all(|&q| (0.0..=sup).contains(&q)));
    }

    #[test]
    fn records_cover_the_run() {
        let run = run_cmm(&small(0.05)).unwrap();
        assert_eq!(run.records.len(), 11);
        assert!(run.records.windows(2).all(|w| w[1].t > w[0].t));
        assert!((run.records.last().unwrap().t - 1.0).abs() < 1e-12);
        let thin = run_cmm(&SimulationConfig {
            diag_every: 4,
            ..small(0.05)
        })
        .unwrap();
        // steps 0, 4, 8 plus the final state
        assert_eq!(thin.records.len(), 4);
    }

    #[test]
    fn deterministic() {
        let a = run_cmm(&small(0.3)).unwrap();
        let b = run_cmm(&small(0.3)).unwrap();
        assert_eq!(a.final_f, b.final_f);
        for (x, y) in a.records.iter().zip(&b.records) {
            assert_eq!((x.mass, x.e_pot, x.e_det), (y.mass, y.e_pot, y.e_det));
        }
    }

    #[test]
    fn remap_resets_active_map() {
        let cfg = SimulationConfig {
            eps: 0.5,
            delta_det: 1e-6,
            t_final: 2.0,
            ..small(0.5)
        };
        let mut solver = CmmSolver::new(cfg).unwrap();
        let mut remaps = 0;
        while !solver.is_done() {
            let before = solver.stack().len();
            solver.advance().unwrap();
            let after = solver.stack().len();
            if after > before {
                assert_eq!(after, before + 1);
                assert_eq!(solver.stack().active.jacobian_det_error(), 0.0);
                remaps += 1;
            }
        }
        assert!(remaps > 0);
    }

    #[test]
    fn support_exit_can_abort() {
        // a wide beam pair whose tails reach the boundary band
        let cfg = SimulationConfig {
            ic: IcKind::TwoStream,
            v0: 10.0,
            abort_on_support_exit: true,
            ..small(0.05)
        };
        let err = run_cmm(&cfg).unwrap_err();
        assert!(matches!(err, CmmError::SupportExit { .. }), "{err}");
    }
}
