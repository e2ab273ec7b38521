//! Fourier collocation engine for the periodic horizontal directions.
//!
//! Levels are stored row-major `[y][x]`. Transforms are unnormalized rustfft
//! plans; the forward direction divides by `nx * ny` so that coefficients are
//! those of `f = sum_k fhat(k) exp(i k . x)`.

use crate::grid::Grid;
use crate::Scalar;
use num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;

pub struct SpectralGrid<S: Scalar> {
    pub nx: usize,
    pub ny: usize,
    pub l1: f64,
    pub l2: f64,
    fwd_x: Arc<dyn Fft<S>>,
    inv_x: Arc<dyn Fft<S>>,
    fwd_y: Arc<dyn Fft<S>>,
    inv_y: Arc<dyn Fft<S>>,
    /// Signed wavenumber 2*pi*m/L per x index (Nyquist kept positive).
    pub k1: Vec<f64>,
    pub k2: Vec<f64>,
    /// Derivative multipliers: like `k1`/`k2` but zeroed on the Nyquist mode.
    pub d1: Vec<f64>,
    pub d2: Vec<f64>,
    /// 2/3-rule keep mask per (j, i) flattened index.
    keep: Vec<bool>,
}

/// Signed frequency index for slot `n` of an `n_total`-point transform.
pub fn signed_freq(n: usize, n_total: usize) -> i64 {
    if n <= n_total / 2 {
        n as i64
    } else {
        n as i64 - n_total as i64
    }
}

impl<S: Scalar> SpectralGrid<S> {
    pub fn new(grid: &Grid) -> Self {
        let mut planner = FftPlanner::<S>::new();
        let (nx, ny) = (grid.nx, grid.ny);
        let fwd_x = planner.plan_fft_forward(nx);
        let inv_x = planner.plan_fft_inverse(nx);
        let fwd_y = planner.plan_fft_forward(ny);
        let inv_y = planner.plan_fft_inverse(ny);

        let wavenumbers = |n: usize, l: f64| -> (Vec<f64>, Vec<f64>) {
            let mut k = vec![0.0; n];
            let mut d = vec![0.0; n];
            for (idx, slot) in k.iter_mut().enumerate() {
                let m = signed_freq(idx, n);
                *slot = 2.0 * std::f64::consts::PI * m as f64 / l;
                // Nyquist derivative is zeroed to keep real fields real.
                d[idx] = if idx == n / 2 { 0.0 } else { *slot };
            }
            (k, d)
        };
        let (k1, d1) = wavenumbers(nx, grid.l1);
        let (k2, d2) = wavenumbers(ny, grid.l2);

        let mut keep = vec![false; nx * ny];
        let (cx, cy) = (nx as i64 / 3, ny as i64 / 3);
        for j in 0..ny {
            for i in 0..nx {
                let m1 = signed_freq(i, nx).abs();
                let m2 = signed_freq(j, ny).abs();
                keep[j * nx + i] = m1 <= cx && m2 <= cy;
            }
        }

        SpectralGrid {
            nx,
            ny,
            l1: grid.l1,
            l2: grid.l2,
            fwd_x,
            inv_x,
            fwd_y,
            inv_y,
            k1,
            k2,
            d1,
            d2,
            keep,
        }
    }

    pub fn nh(&self) -> usize {
        self.nx * self.ny
    }

    /// Forward 2-D transform of one real level; coefficients of exp(i k.x).
    pub fn forward(&self, values: &[S]) -> Vec<Complex<S>> {
        debug_assert_eq!(values.len(), self.nh());
        let mut buf: Vec<Complex<S>> = values.iter().map(|&v| Complex::new(v, S::zero())).collect();
        self.forward_inplace(&mut buf);
        buf
    }

    pub fn forward_inplace(&self, buf: &mut [Complex<S>]) {
        let (nx, ny) = (self.nx, self.ny);
        for j in 0..ny {
            self.fwd_x.process(&mut buf[j * nx..(j + 1) * nx]);
        }
        let mut col = vec![Complex::new(S::zero(), S::zero()); ny];
        for i in 0..nx {
            for j in 0..ny {
                col[j] = buf[j * nx + i];
            }
            self.fwd_y.process(&mut col);
            for j in 0..ny {
                buf[j * nx + i] = col[j];
            }
        }
        let scale = S::one() / S::lit((nx * ny) as f64);
        for c in buf.iter_mut() {
            *c = c.scale(scale);
        }
    }

    /// Inverse 2-D transform; returns the real parts.
    pub fn inverse(&self, coeffs: &[Complex<S>]) -> Vec<S> {
        debug_assert_eq!(coeffs.len(), self.nh());
        let mut buf = coeffs.to_vec();
        self.inverse_inplace(&mut buf);
        buf.iter().map(|c| c.re).collect()
    }

    pub fn inverse_inplace(&self, buf: &mut [Complex<S>]) {
        let (nx, ny) = (self.nx, self.ny);
        let mut col = vec![Complex::new(S::zero(), S::zero()); ny];
        for i in 0..nx {
            for j in 0..ny {
                col[j] = buf[j * nx + i];
            }
            self.inv_y.process(&mut col);
            for j in 0..ny {
                buf[j * nx + i] = col[j];
            }
        }
        for j in 0..ny {
            self.inv_x.process(&mut buf[j * nx..(j + 1) * nx]);
        }
    }

    /// Spectral x1-derivative of one level.
    pub fn dx_level(&self, values: &[S]) -> Vec<S> {
        self.derivative_level(values, true)
    }

    /// Spectral x2-derivative of one level.
    pub fn dy_level(&self, values: &[S]) -> Vec<S> {
        self.derivative_level(values, false)
    }

    fn derivative_level(&self, values: &[S], along_x: bool) -> Vec<S> {
        let mut spec = self.forward(values);
        self.derivative_spec(&mut spec, along_x);
        self.inverse(&spec)
    }

    /// Multiplies coefficients by `i k` along the requested direction.
    pub fn derivative_spec(&self, spec: &mut [Complex<S>], along_x: bool) {
        let (nx, ny) = (self.nx, self.ny);
        for j in 0..ny {
            for i in 0..nx {
                let k = if along_x { self.d1[i] } else { self.d2[j] };
                let c = spec[j * nx + i];
                spec[j * nx + i] = Complex::new(-c.im, c.re).scale(S::lit(k));
            }
        }
    }

    /// Zeroes the outer third of the spectrum in place.
    pub fn dealias_spec(&self, spec: &mut [Complex<S>]) {
        for (c, keep) in spec.iter_mut().zip(self.keep.iter()) {
            if !keep {
                *c = Complex::new(S::zero(), S::zero());
            }
        }
    }

    /// 2/3-rule product of two levels: both inputs and the result truncated.
    pub fn dealiased_mul_level(&self, a: &[S], b: &[S]) -> Vec<S> {
        let mut sa = self.forward(a);
        let mut sb = self.forward(b);
        self.dealias_spec(&mut sa);
        self.dealias_spec(&mut sb);
        let ta = self.inverse(&sa);
        let tb = self.inverse(&sb);
        let prod: Vec<S> = ta.iter().zip(tb.iter()).map(|(&x, &y)| x * y).collect();
        let mut sp = self.forward(&prod);
        self.dealias_spec(&mut sp);
        self.inverse(&sp)
    }

    /// |k|^2 at flattened spectral index, with the signed frequencies.
    pub fn ksq(&self, i: usize, j: usize) -> f64 {
        self.k1[i] * self.k1[i] + self.k2[j] * self.k2[j]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> Grid {
        Grid::new(16, 8, 8, 1.0, 2.0).unwrap()
    }

    #[test]
    fn round_trip_is_identity() {
        let g = grid();
        let sp = SpectralGrid::<f64>::new(&g);
        let vals: Vec<f64> = (0..g.nh())
            .map(|n| {
                let i = n % g.nx;
                let j = n / g.nx;
                (2.0 * std::f64::consts::PI * i as f64 / g.nx as f64).sin()
                    + 0.3 * (2.0 * std::f64::consts::PI * 2.0 * j as f64 / g.ny as f64).cos()
            })
            .collect();
        let spec = sp.forward(&vals);
        let back = sp.inverse(&spec);
        for (a, b) in vals.iter().zip(back.iter()) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn derivative_of_single_mode_is_exact() {
        let g = grid();
        let sp = SpectralGrid::<f64>::new(&g);
        let k = 2.0 * std::f64::consts::PI / g.l1;
        let vals: Vec<f64> = (0..g.nh())
            .map(|n| (k * g.xcoord(n % g.nx)).cos())
            .collect();
        let want: Vec<f64> = (0..g.nh())
            .map(|n| -k * (k * g.xcoord(n % g.nx)).sin())
            .collect();
        let got = sp.dx_level(&vals);
        for (a, b) in want.iter().zip(got.iter()) {
            assert!((a - b).abs() < 1e-11, "{a} vs {b}");
        }
    }

    #[test]
    fn dealiased_product_of_low_modes_is_exact() {
        let g = grid();
        let sp = SpectralGrid::<f64>::new(&g);
        let k = 2.0 * std::f64::consts::PI / g.l1;
        let a: Vec<f64> = (0..g.nh())
            .map(|n| (k * g.xcoord(n % g.nx)).cos())
            .collect();
        let b = a.clone();
        let got = sp.dealiased_mul_level(&a, &b);
        // cos^2 = 1/2 + cos(2k)/2, both modes inside the kept band for nx = 16
        for (n, &v) in got.iter().enumerate() {
            let x = g.xcoord(n % g.nx);
            let want = 0.5 + 0.5 * (2.0 * k * x).cos();
            assert!((v - want).abs() < 1e-12);
        }
    }
}
