//! Flattening geometry: harmonic extension of the surface function, the map
//! components `A`, `B`, `J`, `K`, the transform matrix, surface normal data
//! and discrete Sobolev norms on the surface.

use crate::error::{Error, Result};
use crate::fft::{signed_freq, SpectralGrid};
use crate::field::{MatrixField, SurfaceField, VectorField, VolumeField};
use crate::grid::Grid;
use crate::Scalar;

/// 3-vector field on the surface, plain nodal storage.
#[derive(Debug, Clone)]
pub struct SurfaceVector<S: Scalar> {
    pub comps: [Vec<S>; 3],
}

impl<S: Scalar> SurfaceVector<S> {
    pub fn zeros(n: usize) -> Self {
        SurfaceVector {
            comps: [vec![S::zero(); n], vec![S::zero(); n], vec![S::zero(); n]],
        }
    }

    pub fn len(&self) -> usize {
        self.comps[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.comps[0].is_empty()
    }

    pub fn dot_at(&self, other: &SurfaceVector<S>, n: usize) -> S {
        self.comps[0][n] * other.comps[0][n]
            + self.comps[1][n] * other.comps[1][n]
            + self.comps[2][n] * other.comps[2][n]
    }

    pub fn linf(&self) -> f64 {
        self.comps.iter().fold(0.0f64, |m, c| {
            c.iter().fold(m, |mm, v| mm.max(v.abs().to_f64_lossy()))
        })
    }
}

/// Vertical extension profile of one horizontal mode and its first two
/// z-derivatives, evaluated stably (all exponentials have arguments <= 0).
///
/// For `alpha = epsilon * |k| > 0` the profile is
/// `sinh(alpha (1 + z)) / sinh(alpha)`; the zero mode extends linearly.
pub fn extension_profile(alpha: f64, z: f64) -> (f64, f64, f64) {
    if alpha < 1e-7 {
        // series limit; relative error O(alpha^2)
        return (1.0 + z, 1.0, alpha * alpha * (1.0 + z));
    }
    let denom = 1.0 - (-2.0 * alpha).exp();
    let core = (alpha * z).exp();
    let decay = (-2.0 * alpha * (1.0 + z)).exp();
    let s = core * (1.0 - decay) / denom;
    let ds = alpha * core * (1.0 + decay) / denom;
    (s, ds, alpha * alpha * s)
}

/// Harmonic-type extension of a surface field into the slab.
///
/// Per horizontal mode `k != 0` the vertical profile is
/// `sinh(eps |k| (1 + x3)) / sinh(eps |k|)`; the mean mode extends as
/// `(1 + x3)`. Matches the surface trace at the top and vanishes at the
/// bottom, and is harmonic for the eps-scaled operator
/// `eps^2 (d11 + d22) + d33`.
pub fn harmonic_extend<S: Scalar>(
    eta: &SurfaceField<S>,
    grid: &Grid,
    epsilon: f64,
    sp: &SpectralGrid<S>,
) -> Result<VolumeField<S>> {
    Ok(extend_with_profiles(eta, grid, epsilon, sp)?.0)
}

/// Extension together with its analytic first and second vertical derivatives.
pub fn extend_with_profiles<S: Scalar>(
    eta: &SurfaceField<S>,
    grid: &Grid,
    epsilon: f64,
    sp: &SpectralGrid<S>,
) -> Result<(VolumeField<S>, VolumeField<S>, VolumeField<S>)> {
    if epsilon <= 0.0 {
        return Err(Error::Mismatch(format!(
            "extension parameter must be positive, got {epsilon}"
        )));
    }
    if eta.values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("surface function"));
    }
    let mut out = VolumeField::zeros(grid);
    let mut out_dz = VolumeField::zeros(grid);
    let mut out_dzz = VolumeField::zeros(grid);
    let nh = grid.nh();
    let mut spec = vec![num_complex::Complex::new(S::zero(), S::zero()); nh];
    let mut spec_dz = spec.clone();
    let mut spec_dzz = spec.clone();
    for kz in 0..=grid.nz {
        let z = grid.zcoord(kz);
        for j in 0..grid.ny {
            for i in 0..grid.nx {
                let m1 = signed_freq(i, grid.nx) as f64 / grid.l1;
                let m2 = signed_freq(j, grid.ny) as f64 / grid.l2;
                let kabs = 2.0 * std::f64::consts::PI * (m1 * m1 + m2 * m2).sqrt();
                let (s, ds, dss) = extension_profile(epsilon * kabs, z);
                let c = eta.coeffs[j * grid.nx + i];
                spec[j * grid.nx + i] = c.scale(S::lit(s));
                spec_dz[j * grid.nx + i] = c.scale(S::lit(ds));
                spec_dzz[j * grid.nx + i] = c.scale(S::lit(dss));
            }
        }
        out.level_mut(kz).copy_from_slice(&sp.inverse(&spec));
        out_dz.level_mut(kz).copy_from_slice(&sp.inverse(&spec_dz));
        out_dzz
            .level_mut(kz)
            .copy_from_slice(&sp.inverse(&spec_dzz));
    }
    Ok((out, out_dz, out_dzz))
}

/// Extra geometric quantities linearized in the surface time derivative.
#[derive(Debug, Clone)]
pub struct GeometryTimeLayer<S: Scalar> {
    pub eta_t: SurfaceField<S>,
    pub eta_bar_t: VolumeField<S>,
    pub dz_eta_bar_t: VolumeField<S>,
    pub a_t: VolumeField<S>,
    pub b_t: VolumeField<S>,
    pub j_t: VolumeField<S>,
    pub k_t: VolumeField<S>,
    pub amat_t: MatrixField<S>,
    pub n_t: SurfaceVector<S>,
    pub nmag_t: Vec<S>,
}

/// All geometric quantities derived from one surface state.
#[derive(Debug, Clone)]
pub struct GeometryPack<S: Scalar> {
    pub grid: Grid,
    pub epsilon: f64,
    pub jac_floor: f64,
    pub eta: SurfaceField<S>,
    pub eta_bar: VolumeField<S>,
    /// Analytic vertical derivatives of the extension (per-mode profiles).
    pub dz_eta_bar: VolumeField<S>,
    pub dzz_eta_bar: VolumeField<S>,
    pub a: VolumeField<S>,
    pub b: VolumeField<S>,
    pub j: VolumeField<S>,
    pub k: VolumeField<S>,
    /// Analytic vertical derivatives of A, B, J.
    pub dz_a: VolumeField<S>,
    pub dz_b: VolumeField<S>,
    pub dz_j: VolumeField<S>,
    /// Transform matrix, transpose-inverse of the Jacobian of the map.
    pub amat: MatrixField<S>,
    /// Non-unit upward normal `(-d1 eta, -d2 eta, 1)` and its magnitude.
    pub n: SurfaceVector<S>,
    pub nmag: Vec<S>,
    pub min_j: f64,
    pub time: Option<GeometryTimeLayer<S>>,
}

/// Builds the geometry pack; fails with `GeometryDegenerate` when the
/// Jacobian dips below `jac_floor` anywhere.
pub fn geometry_pack<S: Scalar>(
    eta: &SurfaceField<S>,
    eta_t: Option<&SurfaceField<S>>,
    grid: &Grid,
    epsilon: f64,
    jac_floor: f64,
    sp: &SpectralGrid<S>,
) -> Result<GeometryPack<S>> {
    let (eta_bar, dz_eta_bar, dzz_eta_bar) = extend_with_profiles(eta, grid, epsilon, sp)?;

    let one_plus_z = |k: usize| S::lit(1.0 + grid.zcoord(k));

    let horiz_derivs = |f: &VolumeField<S>| -> (VolumeField<S>, VolumeField<S>) {
        let mut fx = VolumeField::zeros(grid);
        let mut fy = VolumeField::zeros(grid);
        for k in 0..=grid.nz {
            fx.level_mut(k).copy_from_slice(&sp.dx_level(f.level(k)));
            fy.level_mut(k).copy_from_slice(&sp.dy_level(f.level(k)));
        }
        (fx, fy)
    };

    let (ebx, eby) = horiz_derivs(&eta_bar);
    let (ebzx, ebzy) = horiz_derivs(&dz_eta_bar);

    let mut a = VolumeField::zeros(grid);
    let mut b = VolumeField::zeros(grid);
    let mut jf = VolumeField::zeros(grid);
    let mut dz_a = VolumeField::zeros(grid);
    let mut dz_b = VolumeField::zeros(grid);
    let mut dz_j = VolumeField::zeros(grid);
    for k in 0..=grid.nz {
        let w = one_plus_z(k);
        let nh = grid.nh();
        for n in 0..nh {
            let idx = k * nh + n;
            a.data[idx] = w * ebx.data[idx];
            b.data[idx] = w * eby.data[idx];
            jf.data[idx] = S::one() + eta_bar.data[idx] + w * dz_eta_bar.data[idx];
            dz_a.data[idx] = ebx.data[idx] + w * ebzx.data[idx];
            dz_b.data[idx] = eby.data[idx] + w * ebzy.data[idx];
            dz_j.data[idx] = S::lit(2.0) * dz_eta_bar.data[idx] + w * dzz_eta_bar.data[idx];
        }
    }

    let min_j = jf
        .data
        .iter()
        .fold(f64::INFINITY, |m, v| m.min(v.to_f64_lossy()));
    if min_j < jac_floor {
        return Err(Error::GeometryDegenerate {
            min_j,
            floor: jac_floor,
        });
    }
    let kf = jf.map(|v| S::one() / v);

    let mut amat = MatrixField::zeros(grid);
    {
        let n = jf.data.len();
        for idx in 0..n {
            let kv = kf.data[idx];
            amat.entry_mut(0, 0).data[idx] = S::one();
            amat.entry_mut(0, 2).data[idx] = -a.data[idx] * kv;
            amat.entry_mut(1, 1).data[idx] = S::one();
            amat.entry_mut(1, 2).data[idx] = -b.data[idx] * kv;
            amat.entry_mut(2, 2).data[idx] = kv;
        }
    }

    let ex = eta.spectral_dx(sp);
    let ey = eta.spectral_dy(sp);
    let nh = grid.nh();
    let mut normal = SurfaceVector::zeros(nh);
    let mut nmag = vec![S::zero(); nh];
    for n in 0..nh {
        normal.comps[0][n] = -ex.values[n];
        normal.comps[1][n] = -ey.values[n];
        normal.comps[2][n] = S::one();
        nmag[n] = (normal.comps[0][n] * normal.comps[0][n]
            + normal.comps[1][n] * normal.comps[1][n]
            + S::one())
        .sqrt();
    }

    let time = match eta_t {
        None => None,
        Some(etat) => {
            let (eta_bar_t, dz_eta_bar_t, _) = extend_with_profiles(etat, grid, epsilon, sp)?;
            let (ebtx, ebty) = horiz_derivs(&eta_bar_t);
            let mut a_t = VolumeField::zeros(grid);
            let mut b_t = VolumeField::zeros(grid);
            let mut j_t = VolumeField::zeros(grid);
            for k in 0..=grid.nz {
                let w = one_plus_z(k);
                for n in 0..nh {
                    let idx = k * nh + n;
                    a_t.data[idx] = w * ebtx.data[idx];
                    b_t.data[idx] = w * ebty.data[idx];
                    j_t.data[idx] = eta_bar_t.data[idx] + w * dz_eta_bar_t.data[idx];
                }
            }
            let k_t = kf.zip(&j_t, |kv, jt| -kv * kv * jt);
            let mut amat_t = MatrixField::zeros(grid);
            for idx in 0..jf.data.len() {
                let (av, bv, kv) = (a.data[idx], b.data[idx], kf.data[idx]);
                let (atv, btv, ktv) = (a_t.data[idx], b_t.data[idx], k_t.data[idx]);
                amat_t.entry_mut(0, 2).data[idx] = -(atv * kv + av * ktv);
                amat_t.entry_mut(1, 2).data[idx] = -(btv * kv + bv * ktv);
                amat_t.entry_mut(2, 2).data[idx] = ktv;
            }
            let etx = etat.spectral_dx(sp);
            let ety = etat.spectral_dy(sp);
            let mut n_t = SurfaceVector::zeros(nh);
            let mut nmag_t = vec![S::zero(); nh];
            for n in 0..nh {
                n_t.comps[0][n] = -etx.values[n];
                n_t.comps[1][n] = -ety.values[n];
                // third component of N is constant 1
                nmag_t[n] = (normal.comps[0][n] * n_t.comps[0][n]
                    + normal.comps[1][n] * n_t.comps[1][n])
                    / nmag[n];
            }
            Some(GeometryTimeLayer {
                eta_t: etat.clone(),
                eta_bar_t,
                dz_eta_bar_t,
                a_t,
                b_t,
                j_t,
                k_t,
                amat_t,
                n_t,
                nmag_t,
            })
        }
    };

    Ok(GeometryPack {
        grid: *grid,
        epsilon,
        jac_floor,
        eta: eta.clone(),
        eta_bar,
        dz_eta_bar,
        dzz_eta_bar,
        a,
        b,
        j: jf,
        k: kf,
        dz_a,
        dz_b,
        dz_j,
        amat,
        n: normal,
        nmag,
        min_j,
        time,
    })
}

impl<S: Scalar> GeometryPack<S> {
    /// Identity geometry (flat surface at rest).
    pub fn flat(grid: &Grid, sp: &SpectralGrid<S>) -> Self {
        geometry_pack(&SurfaceField::zeros(grid), None, grid, 1.0, 0.5, sp)
            .expect("flat geometry is never degenerate")
    }

    /// Flat geometry carrying a zero time layer.
    pub fn flat_static(grid: &Grid, sp: &SpectralGrid<S>) -> Self {
        geometry_pack(
            &SurfaceField::zeros(grid),
            Some(&SurfaceField::zeros(grid)),
            grid,
            1.0,
            0.5,
            sp,
        )
        .expect("flat geometry is never degenerate")
    }

    pub fn time_layer(&self) -> Result<&GeometryTimeLayer<S>> {
        self.time
            .as_ref()
            .ok_or(Error::MissingTimeLayer("geometry pack has no time layer"))
    }

    /// The coordinate function `y3 = x3 + (1 + x3) eta_bar` as a volume field.
    pub fn y3(&self) -> VolumeField<S> {
        let grid = self.grid;
        let mut out = VolumeField::zeros(&grid);
        let nh = grid.nh();
        for k in 0..=grid.nz {
            let z = S::lit(grid.zcoord(k));
            let w = S::lit(1.0 + grid.zcoord(k));
            for n in 0..nh {
                out.data[k * nh + n] = z + w * self.eta_bar.data[k * nh + n];
            }
        }
        out
    }

    /// Analytic gradient of `y3`: exactly `(A, B, J)`.
    pub fn grad_y3(&self) -> VectorField<S> {
        VectorField::from_comps(self.a.clone(), self.b.clone(), self.j.clone())
    }
}

/// Tangential projection at the surface: `v - (v . N) N / |N|^2`.
pub fn projection_pi0<S: Scalar>(v: &SurfaceVector<S>, pack: &GeometryPack<S>) -> SurfaceVector<S> {
    let nh = v.len();
    let mut out = SurfaceVector::zeros(nh);
    for n in 0..nh {
        let vn = v.dot_at(&pack.n, n);
        let scale = vn / (pack.nmag[n] * pack.nmag[n]);
        for c in 0..3 {
            out.comps[c][n] = v.comps[c][n] - scale * pack.n.comps[c][n];
        }
    }
    out
}

/// Discrete surrogate for the `H^s(Sigma)` norm:
/// `sqrt( sum_k (1 + |k|^2)^s |fhat(k)|^2 L1 L2 )`.
pub fn surface_sobolev_norm<S: Scalar>(f: &SurfaceField<S>, s: f64, sp: &SpectralGrid<S>) -> f64 {
    debug_assert!(
        (-2.0..=6.0).contains(&s),
        "sobolev order out of the supported range"
    );
    let mut acc = 0.0f64;
    for j in 0..sp.ny {
        for i in 0..sp.nx {
            let ksq = sp.ksq(i, j);
            let c = f.coeffs[j * sp.nx + i];
            let mag = (c.re.to_f64_lossy()).powi(2) + (c.im.to_f64_lossy()).powi(2);
            acc += (1.0 + ksq).powf(s) * mag;
        }
    }
    (acc * sp.l1 * sp.l2).sqrt()
}
