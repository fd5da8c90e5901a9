//! Simulation configuration: flat `key = value` files and named presets.
//!
//! Numbers may carry a `pi` factor (`4pi`, `3.8*pi`, `pi`). Lines starting
//! with `#` are comments. Every key is optional; missing keys take the
//! defaults of [`SimulationConfig::default`].

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::charmap::{NodeValue, StepOptions, DEFAULT_STENCIL_EPS};
use crate::error::{CmmError, Result};
use crate::grid::{Domain, Grid2D};
use crate::ic::InitialCondition;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum IcKind {
    Landau,
    TwoStream,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub ic: IcKind,
    pub eps: f64,
    pub k: f64,
    /// Beam velocity; ignored by the Landau distribution.
    pub v0: f64,
    pub lv: f64,
    pub v_star: f64,
    pub coupling: f64,
    /// Coarse map grid.
    pub n: usize,
    /// Sampling grid for the distribution and the charge density.
    pub n_f: usize,
    /// Grid of the stream function.
    pub n_psi: usize,
    /// `None` selects `1 / (n_psi * lv)`.
    pub dt: Option<f64>,
    pub t_final: f64,
    /// Remapping threshold on the Jacobian error; infinite disables remapping.
    pub delta_det: f64,
    /// Longest time span of a single submap. `None` selects a quarter of the
    /// time at which the fundamental mode filaments below the map grid spacing.
    pub max_map_age: Option<f64>,
    pub stencil_eps: f64,
    pub node_value: NodeValue,
    /// Steps between snapshots; 0 disables them.
    pub snapshot_every: usize,
    /// Steps between diagnostics records (the first and last step are always recorded).
    pub diag_every: usize,
    pub max_submaps: usize,
    pub abort_on_support_exit: bool,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        SimulationConfig {
            ic: IcKind::Landau,
            eps: 0.05,
            k: 0.5,
            v0: 0.0,
            lv: 4.0 * PI,
            v_star: 3.8 * PI,
            coupling: 1.0,
            n: 64,
            n_f: 512,
            n_psi: 1024,
            dt: None,
            t_final: 10.0,
            delta_det: 0.05,
            max_map_age: None,
            stencil_eps: DEFAULT_STENCIL_EPS,
            node_value: NodeValue::Center,
            snapshot_every: 0,
            diag_every: 1,
            max_submaps: 4096,
            abort_on_support_exit: false,
        }
    }
}

pub const PRESETS: [&str; 3] = ["landau-linear", "landau-nonlinear", "two-stream"];

impl SimulationConfig {
    pub fn preset(name: &str) -> Result<Self> {
        let base = SimulationConfig::default();
        let cfg = match name {
            "landau-linear" => SimulationConfig {
                n_f: 1024,
                dt: Some(1.0 / 16.0),
                t_final: 50.0,
                ..base
            },
            "landau-nonlinear" => SimulationConfig {
                eps: 0.5,
                n: 256,
                n_f: 1024,
                dt: Some(1.0 / 16.0),
                t_final: 100.0,
                ..base
            },
            "two-stream" => SimulationConfig {
                ic: IcKind::TwoStream,
                eps: 0.05,
                k: 0.2,
                v0: 3.0,
                lv: 5.0 * PI,
                v_star: 4.75 * PI,
                n_f: 512,
                n_psi: 512,
                dt: Some(1.0 / 16.0),
                t_final: 80.0,
                ..base
            },
            other => {
                return Err(CmmError::Config(format!(
                    "unknown preset '{other}', expected one of {}",
                    PRESETS.join(", ")
                )))
            }
        };
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.initial_condition().validate()?;
        self.domain()?;
        for (name, n) in [("n", self.n), ("n_f", self.n_f), ("n_psi", self.n_psi)] {
            if n < 4 || n % 2 != 0 {
                return Err(CmmError::Config(format!("{name} must be even and >= 4, got {n}")));
            }
        }
        if self.n_f > self.n_psi {
            return Err(CmmError::Config(format!(
                "sampling grid ({}) must not be finer than the stream-function grid ({})",
                self.n_f, self.n_psi
            )));
        }
        if let Some(dt) = self.dt {
            if !(dt > 0.0 && dt.is_finite()) {
                return Err(CmmError::Config(format!("dt must be positive, got {dt}")));
            }
        }
        if !(self.t_final > 0.0 && self.t_final.is_finite()) {
            return Err(CmmError::Config(format!("t_final must be positive, got {}", self.t_final)));
        }
        if let Some(a) = self.max_map_age {
            if !(a > 0.0) {
                return Err(CmmError::Config(format!("max_map_age must be positive, got {a}")));
            }
        }
        if !(self.delta_det > 0.0) {
            return Err(CmmError::Config(format!("delta_det must be positive, got {}", self.delta_det)));
        }
        if !(self.stencil_eps > 0.0 && self.stencil_eps.is_finite()) {
            return Err(CmmError::Config(format!("stencil_eps must be positive, got {}", self.stencil_eps)));
        }
        if self.diag_every == 0 {
            return Err(CmmError::Config("diag_every must be at least 1".into()));
        }
        if self.n > self.n_f {
            log::warn!("map grid ({}) is finer than the sampling grid ({})", self.n, self.n_f);
        }
        Ok(())
    }

    pub fn initial_condition(&self) -> InitialCondition {
        match self.ic {
            IcKind::Landau => InitialCondition::Landau {
                eps: self.eps,
                k: self.k,
            },
            IcKind::TwoStream => InitialCondition::TwoStream {
                eps: self.eps,
                k: self.k,
                v0: self.v0,
            },
        }
    }

    pub fn domain(&self) -> Result<Domain> {
        if !(self.k > 0.0) {
            return Err(CmmError::Config(format!("wave number must be positive, got {}", self.k)));
        }
        Domain::new(2.0 * PI / self.k, self.lv, self.v_star, self.coupling)
    }

    pub fn map_grid(&self) -> Result<Grid2D> {
        Grid2D::square(self.domain()?, self.n)
    }

    pub fn sample_grid(&self) -> Result<Grid2D> {
        Grid2D::square(self.domain()?, self.n_f)
    }

    pub fn psi_grid(&self) -> Result<Grid2D> {
        Grid2D::square(self.domain()?, self.n_psi)
    }

    /// Requested step, before adjustment to divide `t_final`.
    pub fn nominal_dt(&self) -> f64 {
        self.dt.unwrap_or(1.0 / (self.n_psi as f64 * self.lv))
    }

    /// Step count and the step actually used: `t_final / ceil(t_final / dt)`.
    pub fn schedule(&self) -> (usize, f64) {
        let raw = self.t_final / self.nominal_dt();
        // tolerate round-off so that e.g. 10 / (1/16) stays 160 steps
        let steps = if (raw - raw.round()).abs() < 1e-9 * raw.max(1.0) {
            raw.round()
        } else {
            raw.ceil()
        }
        .max(1.0) as usize;
        (steps, self.t_final / steps as f64)
    }

    /// Age limit passed to the remapping check. Infinite when remapping is off.
    pub fn map_age_limit(&self) -> f64 {
        if self.delta_det.is_infinite() {
            return f64::INFINITY;
        }
        // v-filaments of wavenumber k t alias on the map grid near t = 2 pi / (k hv)
        let hv = 2.0 * self.lv / self.n as f64;
        self.max_map_age.unwrap_or(0.5 * PI / (self.k * hv))
    }

    pub fn step_options(&self) -> StepOptions {
        StepOptions {
            eps: self.stencil_eps,
            node_value: self.node_value,
        }
    }

    pub fn parse_str(text: &str) -> Result<Self> {
        let mut cfg = SimulationConfig::default();
        cfg.apply_str(text)?;
        Ok(cfg)
    }

    /// Applies the `key = value` lines of `text` on top of `self`, then validates.
    pub fn apply_str(&mut self, text: &str) -> Result<()> {
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| CmmError::Parse {
                line: line_no,
                msg: format!("expected 'key = value', got '{line}'"),
            })?;
            self.set(key.trim(), value.trim())
                .map_err(|msg| CmmError::Parse { line: line_no, msg })?;
        }
        self.validate().map_err(|e| match e {
            CmmError::Config(msg) => CmmError::Parse { line: 0, msg },
            other => other,
        })
    }

    /// Sets a single key without validating the result.
    pub fn set_key(&mut self, key: &str, value: &str) -> Result<()> {
        self.set(key.trim(), value.trim()).map_err(CmmError::Config)
    }

    pub fn parse_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CmmError::io(path, e))?;
        Self::parse_str(&text)
    }

    fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        match key {
            "ic" => {
                self.ic = match value {
                    "landau" => IcKind::Landau,
                    "two-stream" => IcKind::TwoStream,
                    _ => return Err(format!("unknown initial condition '{value}'")),
                }
            }
            "eps" => self.eps = nonneg(key, value)?,
            "k" => self.k = positive(key, value)?,
            "v0" => self.v0 = nonneg(key, value)?,
            "lv" => self.lv = positive(key, value)?,
            "v_star" => self.v_star = positive(key, value)?,
            "coupling" => self.coupling = positive(key, value)?,
            "n" => self.n = count(key, value)?,
            "n_f" => self.n_f = count(key, value)?,
            "n_psi" => self.n_psi = count(key, value)?,
            "dt" => {
                self.dt = match value {
                    "auto" => None,
                    _ => Some(positive(key, value)?),
                }
            }
            "t_final" => self.t_final = positive(key, value)?,
            "delta_det" => {
                self.delta_det = match value {
                    "off" | "inf" => f64::INFINITY,
                    _ => positive(key, value)?,
                }
            }
            "max_map_age" => {
                self.max_map_age = match value {
                    "auto" => None,
                    "off" | "inf" => Some(f64::INFINITY),
                    _ => Some(positive(key, value)?),
                }
            }
            "stencil_eps" => self.stencil_eps = positive(key, value)?,
            "node_value" => {
                self.node_value = match value {
                    "center" => NodeValue::Center,
                    "corner-mean" => NodeValue::CornerMean,
                    _ => return Err(format!("node_value must be 'center' or 'corner-mean', got '{value}'")),
                }
            }
            "snapshot_every" => self.snapshot_every = count(key, value)?,
            "diag_every" => self.diag_every = count(key, value)?,
            "max_submaps" => self.max_submaps = count(key, value)?,
            "abort_on_support_exit" => {
                self.abort_on_support_exit = value
                    .parse()
                    .map_err(|_| format!("abort_on_support_exit must be true or false, got '{value}'"))?
            }
            _ => return Err(format!("unknown key '{key}'")),
        }
        Ok(())
    }

    /// Serializes every key; [`SimulationConfig::parse_str`] reads it back unchanged.
    pub fn to_config_string(&self) -> String {
        let mut s = String::new();
        let ic = match self.ic {
            IcKind::Landau => "landau",
            IcKind::TwoStream => "two-stream",
        };
        let node = match self.node_value {
            NodeValue::Center => "center",
            NodeValue::CornerMean => "corner-mean",
        };
        let dt = self.dt.map_or("auto".to_string(), |d| format!("{d:?}"));
        let delta = if self.delta_det.is_infinite() {
            "off".to_string()
        } else {
            format!("{:?}", self.delta_det)
        };
        let _ = writeln!(s, "ic = {ic}");
        for (key, val) in [
            ("eps", self.eps),
            ("k", self.k),
            ("v0", self.v0),
            ("lv", self.lv),
            ("v_star", self.v_star),
            ("coupling", self.coupling),
        ] {
            let _ = writeln!(s, "{key} = {val:?}");
        }
        for (key, val) in [("n", self.n), ("n_f", self.n_f), ("n_psi", self.n_psi)] {
            let _ = writeln!(s, "{key} = {val}");
        }
        let _ = writeln!(s, "dt = {dt}");
        let _ = writeln!(s, "t_final = {:?}", self.t_final);
        let _ = writeln!(s, "delta_det = {delta}");
        let age = match self.max_map_age {
            None => "auto".to_string(),
            Some(a) if a.is_infinite() => "off".to_string(),
            Some(a) => format!("{a:?}"),
        };
        let _ = writeln!(s, "max_map_age = {age}");
        let _ = writeln!(s, "stencil_eps = {:?}", self.stencil_eps);
        let _ = writeln!(s, "node_value = {node}");
        let _ = writeln!(s, "snapshot_every = {}", self.snapshot_every);
        let _ = writeln!(s, "diag_every = {}", self.diag_every);
        let _ = writeln!(s, "max_submaps = {}", self.max_submaps);
        let _ = writeln!(s, "abort_on_support_exit = {}", self.abort_on_support_exit);
        s
    }

    pub fn write_file(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_config_string()).map_err(|e| CmmError::io(path, e))
    }
}

/// Parses a real number with an optional `pi` factor, or a quotient of two
/// such numbers (`1/16`, `4pi/1024`).
pub fn parse_number(value: &str) -> std::result::Result<f64, String> {
    match value.split_once('/') {
        Some((num, den)) => {
            let q = parse_term(num)? / parse_term(den)?;
            if q.is_finite() {
                Ok(q)
            } else {
                Err(format!("value must be finite, got '{value}'"))
            }
        }
        None => parse_term(value),
    }
}

fn parse_term(value: &str) -> std::result::Result<f64, String> {
    let v = value.trim();
    let x = if let Some(head) = v.strip_suffix("pi") {
        let head = head.trim().trim_end_matches('*').trim();
        let c = match head {
            "" | "+" => 1.0,
            "-" => -1.0,
            h => h.parse::<f64>().map_err(|_| format!("invalid number '{value}'"))?,
        };
        c * PI
    } else {
        v.parse::<f64>().map_err(|_| format!("invalid number '{value}'"))?
    };
    if x.is_finite() {
        Ok(x)
    } else {
        Err(format!("value must be finite, got '{value}'"))
    }
}

fn positive(key: &str, value: &str) -> std::result::Result<f64, String> {
    let x = parse_number(value)?;
    if x > 0.0 {
        Ok(x)
    } else {
        Err(format!("{key} must be positive, got {value}"))
    }
}

fn nonneg(key: &str, value: &str) -> std::result::Result<f64, String> {
    let x = parse_number(value)?;
    if x >= 0.0 {
        Ok(x)
    } else {
        Err(format!("{key} must be non-negative, got {value}"))
    }
}

fn count(key: &str, value: &str) -> std::result::Result<usize, String> {
    value
        .parse::<usize>()
        .map_err(|_| format!("{key} must be a non-negative integer, got '{value}'"))
}
