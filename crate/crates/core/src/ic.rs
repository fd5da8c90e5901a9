//! Initial distributions.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{CmmError, Result};

/// Closed-form initial distribution `f0(x, v)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum InitialCondition {
    /// `(1 + eps cos(kx)) exp(-v^2/2) / sqrt(2 pi)`.
    Landau { eps: f64, k: f64 },
    /// `(1 + eps cos(kx)) (exp(-(v-v0)^2/2) + exp(-(v+v0)^2/2)) / (2 sqrt(2 pi))`.
    TwoStream { eps: f64, k: f64, v0: f64 },
}

pub fn ic_landau(eps: f64, k: f64) -> Result<InitialCondition> {
    let ic = InitialCondition::Landau { eps, k };
    ic.validate()?;
    Ok(ic)
}

pub fn ic_two_stream(eps: f64, k: f64, v0: f64) -> Result<InitialCondition> {
    let ic = InitialCondition::TwoStream { eps, k, v0 };
    ic.validate()?;
    Ok(ic)
}

impl InitialCondition {
    pub fn validate(&self) -> Result<()> {
        let (eps, k) = (self.eps(), self.k());
        if !(eps >= 0.0 && eps.is_finite()) {
            return Err(CmmError::Config(format!("perturbation amplitude must be >= 0, got {eps}")));
        }
        if !(k > 0.0 && k.is_finite()) {
            return Err(CmmError::Config(format!("wave number must be positive, got {k}")));
        }
        if let InitialCondition::TwoStream { v0, .. } = *self {
            if !(v0 >= 0.0 && v0.is_finite()) {
                return Err(CmmError::Config(format!("beam velocity must be >= 0, got {v0}")));
            }
        }
        Ok(())
    }

    pub fn eps(&self) -> f64 {
        match *self {
            InitialCondition::Landau { eps, .. } | InitialCondition::TwoStream { eps, .. } => eps,
        }
    }

    pub fn k(&self) -> f64 {
        match *self {
            InitialCondition::Landau { k, .. } | InitialCondition::TwoStream { k, .. } => k,
        }
    }

    #[inline]
    pub fn eval(&self, x: f64, v: f64) -> f64 {
        let norm = 1.0 / (2.0 * PI).sqrt();
        match *self {
            InitialCondition::Landau { eps, k } => {
                (1.0 + eps * (k * x).cos()) * norm * (-0.5 * v * v).exp()
            }
            InitialCondition::TwoStream { eps, k, v0 } => {
                let (a, b) = (v - v0, v + v0);
                (1.0 + eps * (k * x).cos()) * 0.5 * norm * ((-0.5 * a * a).exp() + (-0.5 * b * b).exp())
            }
        }
    }

    /// Upper bound of `f0` over phase space.
    pub fn sup(&self) -> f64 {
        let norm = 1.0 / (2.0 * PI).sqrt();
        match *self {
            InitialCondition::Landau { eps, .. } => (1.0 + eps) * norm,
            InitialCondition::TwoStream { eps, v0, .. } => {
                // the v-profile peaks at v = +-v0 for separated beams and at 0 otherwise
                let prof = |v: f64| {
                    0.5 * ((-0.5 * (v - v0).powi(2)).exp() + (-0.5 * (v + v0).powi(2)).exp())
                };
                let n = 2000;
                let h = (v0 + 1.0) / n as f64;
                let best = (0..=n)
                    .max_by(|&a, &b| prof(a as f64 * h).total_cmp(&prof(b as f64 * h)))
                    .unwrap_or(0);
                // golden-section refinement around the coarse maximum
                let (mut lo, mut hi) = ((best as f64 - 1.0).max(0.0) * h, (best as f64 + 1.0) * h);
                let r = 0.5 * (5f64.sqrt() - 1.0);
                for _ in 0..80 {
                    let (a, b) = (hi - r * (hi - lo), lo + r * (hi - lo));
                    if prof(a) < prof(b) {
                        lo = a;
                    } else {
                        hi = b;
                    }
                }
                let peak = prof(0.5 * (lo + hi)).max(prof(best as f64 * h)) * (1.0 + 1e-14);
                (1.0 + eps) * norm * peak
            }
        }
    }

    pub fn inf(&self) -> f64 {
        0.0
    }

    /// Largest `f0` on the band `|v| >= v_star`.
    pub fn tail_max(&self, v_star: f64) -> f64 {
        let v0 = match *self {
            InitialCondition::TwoStream { v0, .. } => v0,
            _ => 0.0,
        };
        let v = v_star.max(v0);
        (0..64)
            .map(|i| self.eval(0.0, v + i as f64 * 0.01))
            .fold(self.eval(0.0, v_star), f64::max)
    }
}
