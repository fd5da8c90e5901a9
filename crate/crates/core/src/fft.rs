//! Thin helpers over `rustfft` with a per-thread planner cache.

use std::cell::RefCell;

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// Unnormalized forward DFT, in place.
pub fn forward(buf: &mut [Complex64]) {
    let fft = PLANNER.with(|p| p.borrow_mut().plan_fft_forward(buf.len()));
    fft.process(buf);
}

/// Inverse DFT scaled by `1/n`, in place.
pub fn inverse(buf: &mut [Complex64]) {
    let n = buf.len();
    let fft = PLANNER.with(|p| p.borrow_mut().plan_fft_inverse(n));
    fft.process(buf);
    let s = 1.0 / n as f64;
    buf.iter_mut().for_each(|c| *c *= s);
}

pub fn forward_real(x: &[f64]) -> Vec<Complex64> {
    let mut buf: Vec<Complex64> = x.iter().map(|&r| Complex64::new(r, 0.0)).collect();
    forward(&mut buf);
    buf
}

pub fn inverse_real(mut spec: Vec<Complex64>) -> Vec<f64> {
    inverse(&mut spec);
    spec.into_iter().map(|c| c.re).collect()
}

/// Signed mode index of DFT bin `m` on `n` points, in `[-n/2, n/2)`.
#[inline]
pub fn signed_mode(m: usize, n: usize) -> i64 {
    if m < n / 2 {
        m as i64
    } else {
        m as i64 - n as i64
    }
}

/// 2D DFT of an `nx * nv` array stored with the second index fastest.
pub fn forward_2d(data: &mut [Complex64], nx: usize, nv: usize) {
    transform_2d(data, nx, nv, false);
}

/// Inverse of [`forward_2d`], scaled by `1/(nx nv)`.
pub fn inverse_2d(data: &mut [Complex64], nx: usize, nv: usize) {
    transform_2d(data, nx, nv, true);
}

fn transform_2d(data: &mut [Complex64], nx: usize, nv: usize, inverse: bool) {
    assert_eq!(data.len(), nx * nv);
    let (row, col) = PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        if inverse {
            (p.plan_fft_inverse(nv), p.plan_fft_inverse(nx))
        } else {
            (p.plan_fft_forward(nv), p.plan_fft_forward(nx))
        }
    });
    row.process(data);
    let mut column = vec![Complex64::new(0.0, 0.0); nx];
    for j in 0..nv {
        for i in 0..nx {
            column[i] = data[i * nv + j];
        }
        col.process(&mut column);
        for i in 0..nx {
            data[i * nv + j] = column[i];
        }
    }
    if inverse {
        let s = 1.0 / (nx * nv) as f64;
        data.iter_mut().for_each(|c| *c *= s);
    }
}
