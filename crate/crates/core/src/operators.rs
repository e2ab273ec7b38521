//! Discrete transformed differential operators on the slab.
//!
//! Horizontal derivatives are spectral, vertical derivatives second-order
//! centered with second-order one-sided closures at both ends. The transform
//! matrix contraction turns them into the slab-coordinate operators.

use crate::error::Result;
use crate::fft::SpectralGrid;
use crate::field::{MatrixField, SurfaceField, VectorField, VolumeField};
use crate::geometry::GeometryPack;
use crate::Scalar;

/// First-derivative vertical stencil at node `k`; coefficients are in units
/// of `1/h`.
pub fn dz_stencil(k: usize, nz: usize) -> Vec<(usize, f64)> {
    if k == 0 {
        vec![(0, -1.5), (1, 2.0), (2, -0.5)]
    } else if k == nz {
        vec![(nz, 1.5), (nz - 1, -2.0), (nz - 2, 0.5)]
    } else {
        vec![(k - 1, -0.5), (k + 1, 0.5)]
    }
}

/// Second-derivative vertical stencil at node `k`; coefficients in `1/h^2`.
pub fn dzz_stencil(k: usize, nz: usize) -> Vec<(usize, f64)> {
    if k == 0 {
        vec![(0, 2.0), (1, -5.0), (2, 4.0), (3, -1.0)]
    } else if k == nz {
        vec![(nz, 2.0), (nz - 1, -5.0), (nz - 2, 4.0), (nz - 3, -1.0)]
    } else {
        vec![(k - 1, 1.0), (k, -2.0), (k + 1, 1.0)]
    }
}

fn apply_vertical<S: Scalar>(
    f: &VolumeField<S>,
    hpow: f64,
    stencil: impl Fn(usize, usize) -> Vec<(usize, f64)>,
) -> VolumeField<S> {
    let nz = f.nz;
    let nh = f.nh();
    let mut out = f.map(|_| S::zero());
    let h = 1.0 / nz as f64;
    let hscale = S::lit(1.0 / h.powf(hpow));
    for k in 0..=nz {
        let st: Vec<(usize, S)> = stencil(k, nz)
            .into_iter()
            .map(|(src, c)| (src, S::lit(c)))
            .collect();
        for n in 0..nh {
            let mut acc = S::zero();
            for &(src, c) in &st {
                acc += c * f.data[src * nh + n];
            }
            out.data[k * nh + n] = acc * hscale;
        }
    }
    out
}

/// Vertical first derivative.
pub fn dz<S: Scalar>(f: &VolumeField<S>) -> VolumeField<S> {
    apply_vertical(f, 1.0, dz_stencil)
}

/// Vertical second derivative.
pub fn dzz<S: Scalar>(f: &VolumeField<S>) -> VolumeField<S> {
    apply_vertical(f, 2.0, dzz_stencil)
}

/// Spectral x1-derivative of a volume field.
pub fn dx<S: Scalar>(f: &VolumeField<S>, sp: &SpectralGrid<S>) -> VolumeField<S> {
    let mut out = f.clone();
    for k in 0..=f.nz {
        let d = sp.dx_level(f.level(k));
        out.level_mut(k).copy_from_slice(&d);
    }
    out
}

/// Spectral x2-derivative of a volume field.
pub fn dy<S: Scalar>(f: &VolumeField<S>, sp: &SpectralGrid<S>) -> VolumeField<S> {
    let mut out = f.clone();
    for k in 0..=f.nz {
        let d = sp.dy_level(f.level(k));
        out.level_mut(k).copy_from_slice(&d);
    }
    out
}

/// Plain coordinate gradient `(d1 f, d2 f, d3 f)`.
pub fn raw_grad<S: Scalar>(f: &VolumeField<S>, sp: &SpectralGrid<S>) -> VectorField<S> {
    VectorField::from_comps(dx(f, sp), dy(f, sp), dz(f))
}

/// Contracts a raw gradient with the pack's transform matrix:
/// `out_i = amat[i][j] g_j`.
pub fn apply_amat<S: Scalar>(pack: &GeometryPack<S>, g: &VectorField<S>) -> VectorField<S> {
    pack.amat.apply(g)
}

/// Transformed gradient `(grad_A f)_i = amat[i][j] d_j f`.
pub fn grad_a<S: Scalar>(
    f: &VolumeField<S>,
    pack: &GeometryPack<S>,
    sp: &SpectralGrid<S>,
) -> VectorField<S> {
    apply_amat(pack, &raw_grad(f, sp))
}

/// Gradient contracted with an arbitrary matrix field (e.g. the time
/// derivative of the transform matrix).
pub fn grad_with_matrix<S: Scalar>(
    f: &VolumeField<S>,
    m: &MatrixField<S>,
    sp: &SpectralGrid<S>,
) -> VectorField<S> {
    m.apply(&raw_grad(f, sp))
}

/// Transformed divergence `div_A u = amat[i][j] d_j u_i`.
pub fn div_a<S: Scalar>(
    u: &VectorField<S>,
    pack: &GeometryPack<S>,
    sp: &SpectralGrid<S>,
) -> VolumeField<S> {
    div_with_matrix(u, &pack.amat, sp)
}

pub fn div_with_matrix<S: Scalar>(
    u: &VectorField<S>,
    m: &MatrixField<S>,
    sp: &SpectralGrid<S>,
) -> VolumeField<S> {
    let mut out = u.comps[0].map(|_| S::zero());
    for i in 0..3 {
        let g = raw_grad(&u.comps[i], sp);
        for j in 0..3 {
            let coeff = &m.entry(i, j).data;
            for (slot, (c, d)) in out
                .data
                .iter_mut()
                .zip(coeff.iter().zip(g.comps[j].data.iter()))
            {
                *slot += *c * *d;
            }
        }
    }
    out
}

/// Transformed Laplacian as the composition `div_A (grad_A f)`.
pub fn lap_a<S: Scalar>(
    f: &VolumeField<S>,
    pack: &GeometryPack<S>,
    sp: &SpectralGrid<S>,
) -> VolumeField<S> {
    div_a(&grad_a(f, pack, sp), pack, sp)
}

/// Fully expanded second-order form of the transformed Laplacian:
///
/// `d11 + d22 + (1 + A^2 + B^2) K^2 d33 - 2 A K d13 - 2 B K d23
///  + (A K d3(A K) + B K d3(B K) - d1(A K) - d2(B K) + K d3 K) d3`.
///
/// Agrees with the composed form up to the vertical discretization error and
/// is usable at boundary nodes through the one-sided stencils.
pub fn lap_a_expanded<S: Scalar>(
    f: &VolumeField<S>,
    pack: &GeometryPack<S>,
    sp: &SpectralGrid<S>,
) -> VolumeField<S> {
    let fxx = dx(&dx(f, sp), sp);
    let fyy = dy(&dy(f, sp), sp);
    let fzz = dzz(f);
    let fz = dz(f);
    let fxz = dz(&dx(f, sp));
    let fyz = dz(&dy(f, sp));

    let ak = pack.a.mul(&pack.k);
    let bk = pack.b.mul(&pack.k);
    let dz_ak = dz(&ak);
    let dz_bk = dz(&bk);
    let dx_ak = dx(&ak, sp);
    let dy_bk = dy(&bk, sp);
    let dz_k = dz(&pack.k);

    let mut out = f.map(|_| S::zero());
    for idx in 0..out.data.len() {
        let a = pack.a.data[idx];
        let b = pack.b.data[idx];
        let k = pack.k.data[idx];
        let akv = ak.data[idx];
        let bkv = bk.data[idx];
        let coeff_zz = (S::one() + a * a + b * b) * k * k;
        let coeff_z =
            akv * dz_ak.data[idx] + bkv * dz_bk.data[idx] - dx_ak.data[idx] - dy_bk.data[idx]
                + k * dz_k.data[idx];
        out.data[idx] = fxx.data[idx] + fyy.data[idx] + coeff_zz * fzz.data[idx]
            - S::lit(2.0) * akv * fxz.data[idx]
            - S::lit(2.0) * bkv * fyz.data[idx]
            + coeff_z * fz.data[idx];
    }
    out
}

/// The expanded temperature operator of the transformed heat equation; equal
/// to the transformed Laplacian applied to `theta`.
pub fn expanded_heat_apply<S: Scalar>(
    theta: &VolumeField<S>,
    pack: &GeometryPack<S>,
    sp: &SpectralGrid<S>,
) -> VolumeField<S> {
    lap_a_expanded(theta, pack, sp)
}

/// Symmetric transformed gradient
/// `(D_A u)_{ij} = amat[i][k] d_k u_j + amat[j][k] d_k u_i`.
pub fn symgrad_a<S: Scalar>(
    u: &VectorField<S>,
    pack: &GeometryPack<S>,
    sp: &SpectralGrid<S>,
) -> MatrixField<S> {
    symgrad_with_matrix(u, &pack.amat, sp)
}

pub fn symgrad_with_matrix<S: Scalar>(
    u: &VectorField<S>,
    m: &MatrixField<S>,
    sp: &SpectralGrid<S>,
) -> MatrixField<S> {
    let grads: Vec<VectorField<S>> = (0..3).map(|j| raw_grad(&u.comps[j], sp)).collect();
    let shape = &u.comps[0];
    let mut out = MatrixField {
        comps: (0..9).map(|_| shape.map(|_| S::zero())).collect(),
    };
    for i in 0..3 {
        for j in 0..3 {
            let slot = &mut out.entry_mut(i, j).data;
            for k in 0..3 {
                let mi = &m.entry(i, k).data;
                let mj = &m.entry(j, k).data;
                let gj = &grads[j].comps[k].data;
                let gi = &grads[i].comps[k].data;
                for n in 0..slot.len() {
                    slot[n] += mi[n] * gj[n] + mj[n] * gi[n];
                }
            }
        }
    }
    out
}

/// Transformed viscous stress `S_A(p, u) = p I - D_A u`.
pub fn stress_a<S: Scalar>(
    p: &VolumeField<S>,
    u: &VectorField<S>,
    pack: &GeometryPack<S>,
    sp: &SpectralGrid<S>,
) -> MatrixField<S> {
    let mut out = symgrad_a(u, pack, sp);
    for c in out.comps.iter_mut() {
        for v in c.data.iter_mut() {
            *v = -*v;
        }
    }
    for d in 0..3 {
        let slot = &mut out.entry_mut(d, d).data;
        for (s, pv) in slot.iter_mut().zip(p.data.iter()) {
            *s += *pv;
        }
    }
    out
}

/// Row-wise transformed divergence of a matrix field:
/// `(div_A T)_j = amat[i][k] d_k T_{ij}`.
pub fn div_a_matrix<S: Scalar>(
    t: &MatrixField<S>,
    pack: &GeometryPack<S>,
    sp: &SpectralGrid<S>,
) -> VectorField<S> {
    let shape = &t.comps[0];
    let mut out = VectorField {
        comps: [
            shape.map(|_| S::zero()),
            shape.map(|_| S::zero()),
            shape.map(|_| S::zero()),
        ],
    };
    for j in 0..3 {
        for i in 0..3 {
            let g = raw_grad(t.entry(i, j), sp);
            for k in 0..3 {
                let coeff = &pack.amat.entry(i, k).data;
                let slot = &mut out.comps[j].data;
                for n in 0..slot.len() {
                    slot[n] += coeff[n] * g.comps[k].data[n];
                }
            }
        }
    }
    out
}

/// Pointwise trace at the top plane of `T N` for a matrix field and the pack
/// normal; returns the three surface components.
pub fn matrix_dot_normal_top<S: Scalar>(t: &MatrixField<S>, pack: &GeometryPack<S>) -> [Vec<S>; 3] {
    let nz = t.comps[0].nz;
    let nh = t.comps[0].nh();
    let mut out = [
        vec![S::zero(); nh],
        vec![S::zero(); nh],
        vec![S::zero(); nh],
    ];
    for i in 0..3 {
        for n in 0..nh {
            let mut acc = S::zero();
            for j in 0..3 {
                acc += t.entry(i, j).data[nz * nh + n] * pack.n.comps[j][n];
            }
            out[i][n] = acc;
        }
    }
    out
}

/// `M = K grad Phi`, its inverse, and the rate matrix `R = dt(M) M^{-1}`.
#[derive(Debug, Clone)]
pub struct MaterialPack<S: Scalar> {
    pub m: MatrixField<S>,
    pub minv: MatrixField<S>,
    pub r: MatrixField<S>,
}

/// Builds the material matrices; the rate matrix needs the pack time layer.
pub fn material_pack<S: Scalar>(pack: &GeometryPack<S>) -> Result<MaterialPack<S>> {
    let layer = pack.time_layer()?;
    let grid = pack.grid;
    let mut m = MatrixField::zeros(&grid);
    let mut minv = MatrixField::zeros(&grid);
    let mut r = MatrixField::zeros(&grid);
    let n = pack.j.data.len();
    for idx in 0..n {
        let (a, b, j, k) = (
            pack.a.data[idx],
            pack.b.data[idx],
            pack.j.data[idx],
            pack.k.data[idx],
        );
        let (a_t, b_t, k_t) = (
            layer.a_t.data[idx],
            layer.b_t.data[idx],
            layer.k_t.data[idx],
        );
        // M = K grad Phi, grad Phi = [[1,0,0],[0,1,0],[A,B,J]], so M33 = KJ = 1
        m.entry_mut(0, 0).data[idx] = k;
        m.entry_mut(1, 1).data[idx] = k;
        m.entry_mut(2, 0).data[idx] = k * a;
        m.entry_mut(2, 1).data[idx] = k * b;
        m.entry_mut(2, 2).data[idx] = S::one();
        minv.entry_mut(0, 0).data[idx] = j;
        minv.entry_mut(1, 1).data[idx] = j;
        minv.entry_mut(2, 0).data[idx] = -a;
        minv.entry_mut(2, 1).data[idx] = -b;
        minv.entry_mut(2, 2).data[idx] = S::one();
        // R = dt(M) M^{-1}
        let dka = k_t * a + k * a_t;
        let dkb = k_t * b + k * b_t;
        r.entry_mut(0, 0).data[idx] = k_t * j;
        r.entry_mut(1, 1).data[idx] = k_t * j;
        r.entry_mut(2, 0).data[idx] = dka * j;
        r.entry_mut(2, 1).data[idx] = dkb * j;
    }
    Ok(MaterialPack { m, minv, r })
}

/// Material-type derivative `D_t v = v_t - R v`; the caller owns the time
/// discretization of `v_t`.
pub fn material_derivative<S: Scalar>(
    v: &VectorField<S>,
    v_t: &VectorField<S>,
    mat: &MaterialPack<S>,
) -> VectorField<S> {
    let rv = mat.r.apply(v);
    v_t.sub(&rv)
}

/// Trace of a vector field at the top plane as surface component slices.
pub fn vector_trace_top<S: Scalar>(u: &VectorField<S>) -> [Vec<S>; 3] {
    let nz = u.comps[0].nz;
    [
        u.comps[0].level(nz).to_vec(),
        u.comps[1].level(nz).to_vec(),
        u.comps[2].level(nz).to_vec(),
    ]
}

/// `u . N` at the top plane.
pub fn normal_velocity_top<S: Scalar>(u: &VectorField<S>, pack: &GeometryPack<S>) -> Vec<S> {
    let nz = u.comps[0].nz;
    let nh = u.comps[0].nh();
    let mut out = vec![S::zero(); nh];
    for n in 0..nh {
        out[n] = u.comps[0].data[nz * nh + n] * pack.n.comps[0][n]
            + u.comps[1].data[nz * nh + n] * pack.n.comps[1][n]
            + u.comps[2].data[nz * nh + n] * pack.n.comps[2][n];
    }
    out
}

/// Robin boundary residual `grad_A theta . N + theta |N| - data` at the top.
pub fn robin_residual_top<S: Scalar>(
    theta: &VolumeField<S>,
    data: &SurfaceField<S>,
    pack: &GeometryPack<S>,
    sp: &SpectralGrid<S>,
) -> Vec<S> {
    let g = grad_a(theta, pack, sp);
    let nz = theta.nz;
    let nh = theta.nh();
    let mut out = vec![S::zero(); nh];
    for n in 0..nh {
        let flux = g.comps[0].data[nz * nh + n] * pack.n.comps[0][n]
            + g.comps[1].data[nz * nh + n] * pack.n.comps[1][n]
            + g.comps[2].data[nz * nh + n] * pack.n.comps[2][n];
        out[n] = flux + theta.data[nz * nh + n] * pack.nmag[n] - data.values[n];
    }
    out
}
