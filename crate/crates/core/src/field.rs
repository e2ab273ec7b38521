//! Field containers on the slab and its top surface.
//!
//! Volume data is stored `[z][y][x]` with z slowest; surface data `[y][x]`.

use crate::error::{Error, Result};
use crate::fft::SpectralGrid;
use crate::grid::Grid;
use crate::Scalar;
use num_complex::Complex;

/// Periodic scalar function on the surface Sigma, kept in both nodal values
/// and horizontal Fourier coefficients.
#[derive(Debug, Clone)]
pub struct SurfaceField<S: Scalar> {
    pub nx: usize,
    pub ny: usize,
    pub values: Vec<S>,
    pub coeffs: Vec<Complex<S>>,
}

impl<S: Scalar> SurfaceField<S> {
    pub fn zeros(grid: &Grid) -> Self {
        SurfaceField {
            nx: grid.nx,
            ny: grid.ny,
            values: vec![S::zero(); grid.nh()],
            coeffs: vec![Complex::new(S::zero(), S::zero()); grid.nh()],
        }
    }

    pub fn constant(grid: &Grid, c: S) -> Self {
        let mut coeffs = vec![Complex::new(S::zero(), S::zero()); grid.nh()];
        coeffs[0] = Complex::new(c, S::zero());
        SurfaceField {
            nx: grid.nx,
            ny: grid.ny,
            values: vec![c; grid.nh()],
            coeffs,
        }
    }

    pub fn from_values(sp: &SpectralGrid<S>, values: Vec<S>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("surface field values"));
        }
        let coeffs = sp.forward(&values);
        Ok(SurfaceField {
            nx: sp.nx,
            ny: sp.ny,
            values,
            coeffs,
        })
    }

    pub fn from_coeffs(sp: &SpectralGrid<S>, coeffs: Vec<Complex<S>>) -> Self {
        let values = sp.inverse(&coeffs);
        SurfaceField {
            nx: sp.nx,
            ny: sp.ny,
            values,
            coeffs,
        }
    }

    /// Evaluates the field from a closure of `(x1, x2)`.
    pub fn from_fn(sp: &SpectralGrid<S>, grid: &Grid, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut values = vec![S::zero(); grid.nh()];
        for j in 0..grid.ny {
            for i in 0..grid.nx {
                values[j * grid.nx + i] = S::lit(f(grid.xcoord(i), grid.ycoord(j)));
            }
        }
        Self::from_values(sp, values).expect("closure produced non-finite surface data")
    }

    pub fn idx(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    /// Max |values - inverse(coeffs)| relative to the field scale.
    pub fn consistency_residual(&self, sp: &SpectralGrid<S>) -> f64 {
        let back = sp.inverse(&self.coeffs);
        let scale = self
            .values
            .iter()
            .fold(S::zero(), |m, v| m.max(v.abs()))
            .max(S::one());
        let mut worst = 0.0f64;
        for (a, b) in self.values.iter().zip(back.iter()) {
            worst = worst.max(((*a - *b) / scale).abs().to_f64_lossy());
        }
        worst
    }

    pub fn spectral_dx(&self, sp: &SpectralGrid<S>) -> SurfaceField<S> {
        let mut spec = self.coeffs.clone();
        sp.derivative_spec(&mut spec, true);
        SurfaceField::from_coeffs(sp, spec)
    }

    pub fn spectral_dy(&self, sp: &SpectralGrid<S>) -> SurfaceField<S> {
        let mut spec = self.coeffs.clone();
        sp.derivative_spec(&mut spec, false);
        SurfaceField::from_coeffs(sp, spec)
    }

    pub fn mean(&self) -> S {
        self.coeffs[0].re
    }

    pub fn linf(&self) -> f64 {
        self.values
            .iter()
            .fold(0.0f64, |m, v| m.max(v.abs().to_f64_lossy()))
    }

    pub fn axpy(&mut self, a: S, other: &SurfaceField<S>) {
        for (x, y) in self.values.iter_mut().zip(other.values.iter()) {
            *x += a * *y;
        }
        for (x, y) in self.coeffs.iter_mut().zip(other.coeffs.iter()) {
            *x += y.scale(a);
        }
    }

    pub fn scaled(&self, a: S) -> SurfaceField<S> {
        SurfaceField {
            nx: self.nx,
            ny: self.ny,
            values: self.values.iter().map(|&v| a * v).collect(),
            coeffs: self.coeffs.iter().map(|c| c.scale(a)).collect(),
        }
    }

    pub fn sub(&self, other: &SurfaceField<S>) -> SurfaceField<S> {
        let mut out = self.clone();
        out.axpy(-S::one(), other);
        out
    }
}

/// Scalar function on the slab; values at `(nz + 1)` node levels.
#[derive(Debug, Clone)]
pub struct VolumeField<S: Scalar> {
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
    pub data: Vec<S>,
}

impl<S: Scalar> VolumeField<S> {
    pub fn zeros(grid: &Grid) -> Self {
        VolumeField {
            nx: grid.nx,
            ny: grid.ny,
            nz: grid.nz,
            data: vec![S::zero(); grid.nvol()],
        }
    }

    pub fn constant(grid: &Grid, c: S) -> Self {
        VolumeField {
            nx: grid.nx,
            ny: grid.ny,
            nz: grid.nz,
            data: vec![c; grid.nvol()],
        }
    }

    pub fn from_fn(grid: &Grid, f: impl Fn(f64, f64, f64) -> f64) -> Self {
        let mut out = Self::zeros(grid);
        for k in 0..=grid.nz {
            let z = grid.zcoord(k);
            for j in 0..grid.ny {
                let y = grid.ycoord(j);
                for i in 0..grid.nx {
                    let n = out.idx(i, j, k);
                    out.data[n] = S::lit(f(grid.xcoord(i), y, z));
                }
            }
        }
        out
    }

    pub fn nh(&self) -> usize {
        self.nx * self.ny
    }

    pub fn idx(&self, i: usize, j: usize, k: usize) -> usize {
        (k * self.ny + j) * self.nx + i
    }

    pub fn level(&self, k: usize) -> &[S] {
        &self.data[k * self.nh()..(k + 1) * self.nh()]
    }

    pub fn level_mut(&mut self, k: usize) -> &mut [S] {
        let nh = self.nh();
        &mut self.data[k * nh..(k + 1) * nh]
    }

    /// Top-plane restriction as a surface field.
    pub fn trace_top(&self, sp: &SpectralGrid<S>) -> SurfaceField<S> {
        SurfaceField::from_values(sp, self.level(self.nz).to_vec())
            .expect("volume field carried non-finite top values")
    }

    /// Bottom-plane values.
    pub fn trace_bottom(&self) -> Vec<S> {
        self.level(0).to_vec()
    }

    pub fn linf(&self) -> f64 {
        self.data
            .iter()
            .fold(0.0f64, |m, v| m.max(v.abs().to_f64_lossy()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn map(&self, f: impl Fn(S) -> S) -> VolumeField<S> {
        VolumeField {
            nx: self.nx,
            ny: self.ny,
            nz: self.nz,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip(&self, other: &VolumeField<S>, f: impl Fn(S, S) -> S) -> VolumeField<S> {
        VolumeField {
            nx: self.nx,
            ny: self.ny,
            nz: self.nz,
            data: self
                .data
                .iter()
                .zip(other.data.iter())
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    pub fn add(&self, other: &VolumeField<S>) -> VolumeField<S> {
        self.zip(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &VolumeField<S>) -> VolumeField<S> {
        self.zip(other, |a, b| a - b)
    }

    pub fn mul(&self, other: &VolumeField<S>) -> VolumeField<S> {
        self.zip(other, |a, b| a * b)
    }

    pub fn scaled(&self, a: S) -> VolumeField<S> {
        self.map(|v| a * v)
    }

    pub fn axpy(&mut self, a: S, other: &VolumeField<S>) {
        for (x, y) in self.data.iter_mut().zip(other.data.iter()) {
            *x += a * *y;
        }
    }

    pub fn max_abs_diff(&self, other: &VolumeField<S>) -> f64 {
        self.data
            .iter()
            .zip(other.data.iter())
            .fold(0.0f64, |m, (a, b)| m.max((*a - *b).abs().to_f64_lossy()))
    }
}

/// 3-vector field on the slab.
#[derive(Debug, Clone)]
pub struct VectorField<S: Scalar> {
    pub comps: [VolumeField<S>; 3],
}

impl<S: Scalar> VectorField<S> {
    pub fn zeros(grid: &Grid) -> Self {
        VectorField {
            comps: [
                VolumeField::zeros(grid),
                VolumeField::zeros(grid),
                VolumeField::zeros(grid),
            ],
        }
    }

    pub fn from_comps(c0: VolumeField<S>, c1: VolumeField<S>, c2: VolumeField<S>) -> Self {
        VectorField {
            comps: [c0, c1, c2],
        }
    }

    pub fn linf(&self) -> f64 {
        self.comps.iter().fold(0.0f64, |m, c| m.max(c.linf()))
    }

    pub fn add(&self, other: &VectorField<S>) -> VectorField<S> {
        VectorField {
            comps: [
                self.comps[0].add(&other.comps[0]),
                self.comps[1].add(&other.comps[1]),
                self.comps[2].add(&other.comps[2]),
            ],
        }
    }

    pub fn sub(&self, other: &VectorField<S>) -> VectorField<S> {
        VectorField {
            comps: [
                self.comps[0].sub(&other.comps[0]),
                self.comps[1].sub(&other.comps[1]),
                self.comps[2].sub(&other.comps[2]),
            ],
        }
    }

    pub fn scaled(&self, a: S) -> VectorField<S> {
        VectorField {
            comps: [
                self.comps[0].scaled(a),
                self.comps[1].scaled(a),
                self.comps[2].scaled(a),
            ],
        }
    }

    pub fn max_abs_diff(&self, other: &VectorField<S>) -> f64 {
        self.comps
            .iter()
            .zip(other.comps.iter())
            .fold(0.0f64, |m, (a, b)| m.max(a.max_abs_diff(b)))
    }
}

/// 3x3 matrix field, row-major entries `m[i][j] = comps[3 i + j]`.
#[derive(Debug, Clone)]
pub struct MatrixField<S: Scalar> {
    pub comps: Vec<VolumeField<S>>,
}

impl<S: Scalar> MatrixField<S> {
    pub fn zeros(grid: &Grid) -> Self {
        MatrixField {
            comps: (0..9).map(|_| VolumeField::zeros(grid)).collect(),
        }
    }

    pub fn entry(&self, i: usize, j: usize) -> &VolumeField<S> {
        &self.comps[3 * i + j]
    }

    pub fn entry_mut(&mut self, i: usize, j: usize) -> &mut VolumeField<S> {
        &mut self.comps[3 * i + j]
    }

    /// Pointwise matrix-vector product.
    pub fn apply(&self, v: &VectorField<S>) -> VectorField<S> {
        let n = self.comps[0].data.len();
        let mut out: [Vec<S>; 3] = [vec![S::zero(); n], vec![S::zero(); n], vec![S::zero(); n]];
        for i in 0..3 {
            for j in 0..3 {
                let m = &self.entry(i, j).data;
                let x = &v.comps[j].data;
                for (slot, (mv, xv)) in out[i].iter_mut().zip(m.iter().zip(x.iter())) {
                    *slot += *mv * *xv;
                }
            }
        }
        let [o0, o1, o2] = out;
        let shape = &self.comps[0];
        let wrap = |data: Vec<S>| VolumeField {
            nx: shape.nx,
            ny: shape.ny,
            nz: shape.nz,
            data,
        };
        VectorField::from_comps(wrap(o0), wrap(o1), wrap(o2))
    }

    /// Pointwise matrix-matrix product `self * other`.
    pub fn matmul(&self, other: &MatrixField<S>) -> MatrixField<S> {
        let shape = &self.comps[0];
        let n = shape.data.len();
        let mut out = MatrixField {
            comps: (0..9)
                .map(|_| VolumeField {
                    nx: shape.nx,
                    ny: shape.ny,
                    nz: shape.nz,
                    data: vec![S::zero(); n],
                })
                .collect(),
        };
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    let a = &self.entry(i, k).data;
                    let b = &other.entry(k, j).data;
                    let slot = &mut out.entry_mut(i, j).data;
                    for ((s, av), bv) in slot.iter_mut().zip(a.iter()).zip(b.iter()) {
                        *s += *av * *bv;
                    }
                }
            }
        }
        out
    }

    pub fn max_abs_diff(&self, other: &MatrixField<S>) -> f64 {
        self.comps
            .iter()
            .zip(other.comps.iter())
            .fold(0.0f64, |m, (a, b)| m.max(a.max_abs_diff(b)))
    }
}
