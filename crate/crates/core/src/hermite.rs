//! Bicubic Hermite jets on periodic grids.
//!
//! A jet carries the value and the derivatives `d/dx`, `d/dv`, `d2/dxdv` at
//! every node. Inside a cell the interpolant is the tensor product of the
//! cubic Hermite basis
//! `{2s^3 - 3s^2 + 1, s^3 - 2s^2 + s, -2s^3 + 3s^2, s^3 - s^2}`, with the
//! derivative basis functions scaled by the cell width.

use crate::error::{CmmError, Result};
use crate::grid::{locate, Grid2D};

/// Value of a jet at one node: `(f, f_x, f_v, f_xv)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Jet {
    pub value: f64,
    pub dx: f64,
    pub dv: f64,
    pub dxv: f64,
}

/// Hermite weights along one axis for local coordinate `s` in a cell of width `h`.
///
/// `val[k]` multiplies node values, `der[k]` multiplies node derivatives,
/// for the left (`k = 0`) and right (`k = 1`) node.
#[derive(Debug, Clone, Copy)]
pub(crate) struct AxisWeights {
    pub val: [f64; 2],
    pub der: [f64; 2],
}

impl AxisWeights {
    #[inline]
    pub fn basis(s: f64, h: f64) -> Self {
        let s2 = s * s;
        let s3 = s2 * s;
        AxisWeights {
            val: [2.0 * s3 - 3.0 * s2 + 1.0, -2.0 * s3 + 3.0 * s2],
            der: [h * (s3 - 2.0 * s2 + s), h * (s3 - s2)],
        }
    }

    /// Derivatives of [`AxisWeights::basis`] with respect to the physical coordinate.
    #[inline]
    pub fn slope(s: f64, h: f64) -> Self {
        let s2 = s * s;
        let inv = 1.0 / h;
        AxisWeights {
            val: [(6.0 * s2 - 6.0 * s) * inv, (-6.0 * s2 + 6.0 * s) * inv],
            der: [3.0 * s2 - 4.0 * s + 1.0, 3.0 * s2 - 2.0 * s],
        }
    }
}

/// Flat node indices of a cell's corners, ordered `[(i,j), (i,j+1), (i+1,j), (i+1,j+1)]`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Cell {
    pub idx: [usize; 4],
    pub sx: f64,
    pub sv: f64,
}

impl Cell {
    #[inline]
    pub fn locate(grid: &Grid2D, x: f64, v: f64) -> Self {
        let (i0, sx) = grid.locate_x(x);
        let (j0, sv) = grid.locate_v(v);
        let i1 = if i0 + 1 == grid.nx { 0 } else { i0 + 1 };
        let j1 = if j0 + 1 == grid.nv { 0 } else { j0 + 1 };
        Cell {
            idx: [
                i0 * grid.nv + j0,
                i0 * grid.nv + j1,
                i1 * grid.nv + j0,
                i1 * grid.nv + j1,
            ],
            sx,
            sv,
        }
    }
}

/// Four node arrays describing a bicubic Hermite interpolant on a periodic grid.
#[derive(Debug, Clone, PartialEq)]
pub struct HermiteField2D {
    pub grid: Grid2D,
    pub value: Vec<f64>,
    pub dx: Vec<f64>,
    pub dv: Vec<f64>,
    pub dxv: Vec<f64>,
}

impl HermiteField2D {
    pub fn zeros(grid: Grid2D) -> Self {
        let n = grid.len();
        HermiteField2D {
            grid,
            value: vec![0.0; n],
            dx: vec![0.0; n],
            dv: vec![0.0; n],
            dxv: vec![0.0; n],
        }
    }

    pub fn constant(grid: Grid2D, c: f64) -> Self {
        let mut f = HermiteField2D::zeros(grid);
        f.value.fill(c);
        f
    }

    /// Seeds every node from a closure returning the full jet at `(x, v)`.
    pub fn from_jet_fn(grid: Grid2D, jet: impl Fn(f64, f64) -> Jet) -> Self {
        let mut f = HermiteField2D::zeros(grid);
        for i in 0..grid.nx {
            let x = grid.x(i);
            for j in 0..grid.nv {
                let k = grid.index(i, j);
                let q = jet(x, grid.v(j));
                f.value[k] = q.value;
                f.dx[k] = q.dx;
                f.dv[k] = q.dv;
                f.dxv[k] = q.dxv;
            }
        }
        f
    }

    pub fn node(&self, k: usize) -> Jet {
        Jet {
            value: self.value[k],
            dx: self.dx[k],
            dv: self.dv[k],
            dxv: self.dxv[k],
        }
    }

    pub fn set_node(&mut self, k: usize, jet: Jet) {
        self.value[k] = jet.value;
        self.dx[k] = jet.dx;
        self.dv[k] = jet.dv;
        self.dxv[k] = jet.dxv;
    }

    pub fn is_finite(&self) -> bool {
        [&self.value, &self.dx, &self.dv, &self.dxv]
            .iter()
            .all(|a| a.iter().all(|x| x.is_finite()))
    }

    #[inline]
    pub(crate) fn combine(&self, cell: &Cell, wx: &AxisWeights, wv: &AxisWeights) -> f64 {
        let mut acc = 0.0;
        for p in 0..2 {
            for q in 0..2 {
                let k = cell.idx[2 * p + q];
                acc += wx.val[p] * (wv.val[q] * self.value[k] + wv.der[q] * self.dv[k])
                    + wx.der[p] * (wv.val[q] * self.dx[k] + wv.der[q] * self.dxv[k]);
            }
        }
        acc
    }

    /// Interpolated value at `(x, v)`; both coordinates wrap periodically.
    #[inline]
    pub fn eval(&self, x: f64, v: f64) -> f64 {
        let cell = Cell::locate(&self.grid, x, v);
        let wx = AxisWeights::basis(cell.sx, self.grid.hx);
        let wv = AxisWeights::basis(cell.sv, self.grid.hv);
        self.combine(&cell, &wx, &wv)
    }

    /// Interpolated value together with the analytic `d/dx` and `d/dv` of the interpolant.
    pub fn eval_grad(&self, x: f64, v: f64) -> (f64, f64, f64) {
        let cell = Cell::locate(&self.grid, x, v);
        let wx = AxisWeights::basis(cell.sx, self.grid.hx);
        let wv = AxisWeights::basis(cell.sv, self.grid.hv);
        let gx = AxisWeights::slope(cell.sx, self.grid.hx);
        let gv = AxisWeights::slope(cell.sv, self.grid.hv);
        (
            self.combine(&cell, &wx, &wv),
            self.combine(&cell, &gx, &wv),
            self.combine(&cell, &wx, &gv),
        )
    }
}

/// Jet at a point from samples at the four corners `(x +- eps, v +- eps)`.
///
/// Samples are ordered `[s(+,+), s(+,-), s(-,+), s(-,-)]`.
pub fn jet_from_stencil(samples: [f64; 4], eps: f64) -> Result<Jet> {
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(CmmError::Config(format!("stencil distance must be positive, got {eps}")));
    }
    Ok(stencil_jet(samples, eps))
}

#[inline]
pub(crate) fn stencil_jet(s: [f64; 4], eps: f64) -> Jet {
    let [pp, pm, mp, mm] = s;
    Jet {
        value: 0.25 * (pp + pm + mp + mm),
        dx: (pp + pm - mp - mm) / (4.0 * eps),
        dv: (pp - pm + mp - mm) / (4.0 * eps),
        dxv: (pp - pm - mp + mm) / (4.0 * eps * eps),
    }
}

/// Cubic Hermite interpolant along one periodic axis.
///
/// Used for the separable pieces of the stream function (`phi(x)` and `g(v)`).
#[derive(Debug, Clone, PartialEq)]
pub struct HermiteLine {
    pub origin: f64,
    pub h: f64,
    pub value: Vec<f64>,
    pub deriv: Vec<f64>,
}

impl HermiteLine {
    pub fn new(origin: f64, h: f64, value: Vec<f64>, deriv: Vec<f64>) -> Self {
        debug_assert_eq!(value.len(), deriv.len());
        HermiteLine {
            origin,
            h,
            value,
            deriv,
        }
    }

    #[inline]
    fn cell(&self, y: f64) -> (usize, usize, f64) {
        let n = self.value.len();
        let (i0, s) = locate((y - self.origin) / self.h, n);
        let i1 = if i0 + 1 == n { 0 } else { i0 + 1 };
        (i0, i1, s)
    }

    #[inline]
    pub fn eval(&self, y: f64) -> f64 {
        let (i0, i1, s) = self.cell(y);
        let w = AxisWeights::basis(s, self.h);
        w.val[0] * self.value[i0]
            + w.val[1] * self.value[i1]
            + w.der[0] * self.deriv[i0]
            + w.der[1] * self.deriv[i1]
    }

    /// Value and derivative of the interpolant from one cell lookup.
    #[inline]
    pub fn eval_with_slope(&self, y: f64) -> (f64, f64) {
        let (i0, i1, s) = self.cell(y);
        let (a, b) = (AxisWeights::basis(s, self.h), AxisWeights::slope(s, self.h));
        let d = [self.value[i0], self.value[i1], self.deriv[i0], self.deriv[i1]];
        (
            a.val[0] * d[0] + a.val[1] * d[1] + a.der[0] * d[2] + a.der[1] * d[3],
            b.val[0] * d[0] + b.val[1] * d[1] + b.der[0] * d[2] + b.der[1] * d[3],
        )
    }

    /// Derivative of the interpolant.
    #[inline]
    pub fn slope(&self, y: f64) -> f64 {
        let (i0, i1, s) = self.cell(y);
        let w = AxisWeights::slope(s, self.h);
        w.val[0] * self.value[i0]
            + w.val[1] * self.value[i1]
            + w.der[0] * self.deriv[i0]
            + w.der[1] * self.deriv[i1]
    }
}
