//! Periodic phase-space domain and uniform node grids.

use serde::{Deserialize, Serialize};

use crate::error::{CmmError, Result};

/// Phase-space box `[0, lx) x [-lv, lv)`, periodic in both directions.
///
/// `v_star` is the half-width of the velocity band on which the periodized
/// velocity equals `v`; `coupling` is the factor in front of the charge
/// density in the Poisson equation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    pub lx: f64,
    pub lv: f64,
    pub v_star: f64,
    pub coupling: f64,
}

impl Domain {
    pub fn new(lx: f64, lv: f64, v_star: f64, coupling: f64) -> Result<Self> {
        let d = Domain {
            lx,
            lv,
            v_star,
            coupling,
        };
        d.validate()?;
        Ok(d)
    }

    /// Domain with `lx = 2 pi / k` and unit coupling.
    pub fn from_wavenumber(k: f64, lv: f64, v_star: f64) -> Result<Self> {
        if !(k > 0.0) || !k.is_finite() {
            return Err(CmmError::Config(format!("wave number must be positive, got {k}")));
        }
        Domain::new(2.0 * std::f64::consts::PI / k, lv, v_star, 1.0)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lx > 0.0 && self.lx.is_finite()) {
            return Err(CmmError::Config(format!("lx must be positive, got {}", self.lx)));
        }
        if !(self.v_star > 0.0 && self.v_star < self.lv && self.lv.is_finite()) {
            return Err(CmmError::Config(format!(
                "need 0 < v_star < lv, got v_star = {}, lv = {}",
                self.v_star, self.lv
            )));
        }
        if !(self.coupling > 0.0 && self.coupling.is_finite()) {
            return Err(CmmError::Config(format!(
                "coupling must be positive, got {}",
                self.coupling
            )));
        }
        Ok(())
    }

    /// Width of the velocity boundary layer, `lv - v_star`.
    pub fn extension(&self) -> f64 {
        self.lv - self.v_star
    }

    /// Wraps `x` into `[0, lx)`.
    #[inline]
    pub fn wrap_x(&self, x: f64) -> f64 {
        if (0.0..self.lx).contains(&x) {
            return x;
        }
        let r = x - self.lx * (x / self.lx).floor();
        if r >= self.lx {
            r - self.lx
        } else {
            r
        }
    }

    /// Wraps `v` into `[-lv, lv)`.
    #[inline]
    pub fn wrap_v(&self, v: f64) -> f64 {
        if (-self.lv..self.lv).contains(&v) {
            return v;
        }
        let p = 2.0 * self.lv;
        let s = v + self.lv;
        let r = s - p * (s / p).floor();
        let r = if r >= p { r - p } else { r };
        r - self.lv
    }
}

/// Uniform periodic grid; nodes exclude the duplicate endpoint.
///
/// `x_i = i hx`, `v_j = -lv + j hv`. Node arrays are stored row-major with
/// `v` running fastest, so the flat index of `(i, j)` is `i * nv + j`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid2D {
    pub domain: Domain,
    pub nx: usize,
    pub nv: usize,
    pub hx: f64,
    pub hv: f64,
}

/// Minimum node count per direction.
pub const MIN_NODES: usize = 4;

pub fn build_grid(domain: Domain, nx: usize, nv: usize) -> Result<Grid2D> {
    domain.validate()?;
    for (name, n) in [("nx", nx), ("nv", nv)] {
        if n < MIN_NODES || n % 2 != 0 {
            return Err(CmmError::Config(format!(
                "{name} must be even and at least {MIN_NODES}, got {n}"
            )));
        }
    }
    Ok(Grid2D {
        domain,
        nx,
        nv,
        hx: domain.lx / nx as f64,
        hv: 2.0 * domain.lv / nv as f64,
    })
}

impl Grid2D {
    pub fn square(domain: Domain, n: usize) -> Result<Self> {
        build_grid(domain, n, n)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.nx * self.nv
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn x(&self, i: usize) -> f64 {
        i as f64 * self.hx
    }

    #[inline]
    pub fn v(&self, j: usize) -> f64 {
        // symmetric about v = 0 so mirrored nodes are exact negatives
        (j as f64 - (self.nv / 2) as f64) * self.hv
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        i * self.nv + j
    }

    pub fn x_nodes(&self) -> Vec<f64> {
        (0..self.nx).map(|i| self.x(i)).collect()
    }

    pub fn v_nodes(&self) -> Vec<f64> {
        (0..self.nv).map(|j| self.v(j)).collect()
    }

    /// All node coordinates in storage order.
    pub fn points(&self) -> Vec<(f64, f64)> {
        let mut out = Vec::with_capacity(self.len());
        for i in 0..self.nx {
            let x = self.x(i);
            for j in 0..self.nv {
                out.push((x, self.v(j)));
            }
        }
        out
    }

    /// Cell index and local coordinate in `[0, 1)` along x, after wrapping.
    #[inline]
    pub(crate) fn locate_x(&self, x: f64) -> (usize, f64) {
        locate(x / self.hx, self.nx)
    }

    #[inline]
    pub(crate) fn locate_v(&self, v: f64) -> (usize, f64) {
        locate((v + self.domain.lv) / self.hv, self.nv)
    }
}

/// Floor-based periodic cell lookup on a grid of `n` unit cells.
#[inline]
pub(crate) fn locate(s: f64, n: usize) -> (usize, f64) {
    let fl = s.floor();
    let t = s - fl;
    let i = (fl as i64).rem_euclid(n as i64) as usize;
    (i, t)
}
