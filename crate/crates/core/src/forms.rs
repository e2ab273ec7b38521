//! Jacobian-weighted bilinear forms on the slab and the multiplication
//! operator by `K` (and its inverse by `J`).
//!
//! Quadrature is trapezoid in the vertical times exact Fourier quadrature
//! (uniform node weights) horizontally.

use crate::error::{Error, Result};
use crate::fft::SpectralGrid;
use crate::field::{SurfaceField, VectorField, VolumeField};
use crate::geometry::GeometryPack;
use crate::operators::{grad_a, symgrad_a};
use crate::Scalar;

/// Assembled forms tied to one geometry state.
pub struct SystemForms<'a, S: Scalar> {
    pub pack: &'a GeometryPack<S>,
    sp: &'a SpectralGrid<S>,
    /// Trapezoid weight per vertical node, including the `h` factor.
    wz: Vec<f64>,
    /// Horizontal quadrature weight per node.
    wh: f64,
}

pub fn assemble_forms<'a, S: Scalar>(
    pack: &'a GeometryPack<S>,
    sp: &'a SpectralGrid<S>,
) -> SystemForms<'a, S> {
    let grid = pack.grid;
    let h = grid.hz();
    let mut wz = vec![h; grid.nz + 1];
    wz[0] = 0.5 * h;
    wz[grid.nz] = 0.5 * h;
    SystemForms {
        pack,
        sp,
        wz,
        wh: grid.l1 * grid.l2 / grid.nh() as f64,
    }
}

impl<'a, S: Scalar> SystemForms<'a, S> {
    fn volume_sum(&self, integrand: impl Fn(usize) -> f64) -> f64 {
        let nh = self.pack.grid.nh();
        let mut acc = 0.0;
        for k in 0..=self.pack.grid.nz {
            let w = self.wz[k] * self.wh;
            let mut level = 0.0;
            for n in 0..nh {
                level += integrand(k * nh + n);
            }
            acc += w * level;
        }
        acc
    }

    fn surface_sum(&self, integrand: impl Fn(usize) -> f64) -> f64 {
        let nh = self.pack.grid.nh();
        let mut acc = 0.0;
        for n in 0..nh {
            acc += integrand(n);
        }
        acc * self.wh
    }

    /// Weighted mass form `(f, g) -> int f g J`.
    pub fn ip_h0(&self, f: &VolumeField<S>, g: &VolumeField<S>) -> f64 {
        let j = &self.pack.j;
        self.volume_sum(|idx| (f.data[idx] * g.data[idx] * j.data[idx]).to_f64_lossy())
    }

    /// Weighted mass form for vector fields.
    pub fn ip_h0_vec(&self, u: &VectorField<S>, v: &VectorField<S>) -> f64 {
        let j = &self.pack.j;
        self.volume_sum(|idx| {
            let mut dot = S::zero();
            for c in 0..3 {
                dot += u.comps[c].data[idx] * v.comps[c].data[idx];
            }
            (dot * j.data[idx]).to_f64_lossy()
        })
    }

    /// Scalar Dirichlet form `(theta, phi) -> int (grad_A theta . grad_A phi) J`.
    pub fn ip_h1_scalar(&self, theta: &VolumeField<S>, phi: &VolumeField<S>) -> f64 {
        let gt = grad_a(theta, self.pack, self.sp);
        let gp = grad_a(phi, self.pack, self.sp);
        let j = &self.pack.j;
        self.volume_sum(|idx| {
            let mut dot = S::zero();
            for c in 0..3 {
                dot += gt.comps[c].data[idx] * gp.comps[c].data[idx];
            }
            (dot * j.data[idx]).to_f64_lossy()
        })
    }

    /// Vector Dirichlet form `(u, psi) -> int (D_A u : D_A psi) J` (unscaled;
    /// the evolution assembly owns the 1/2 factor).
    pub fn ip_h1_vector(&self, u: &VectorField<S>, v: &VectorField<S>) -> f64 {
        let du = symgrad_a(u, self.pack, self.sp);
        let dv = symgrad_a(v, self.pack, self.sp);
        let j = &self.pack.j;
        self.volume_sum(|idx| {
            let mut dot = S::zero();
            for c in 0..9 {
                dot += du.comps[c].data[idx] * dv.comps[c].data[idx];
            }
            (dot * j.data[idx]).to_f64_lossy()
        })
    }

    /// Surface boundary form `(theta, phi) -> int_Sigma theta phi |N|`.
    pub fn boundary_form(&self, theta: &VolumeField<S>, phi: &VolumeField<S>) -> f64 {
        let nz = self.pack.grid.nz;
        let nh = self.pack.grid.nh();
        self.surface_sum(|n| {
            (theta.data[nz * nh + n] * phi.data[nz * nh + n] * self.pack.nmag[n]).to_f64_lossy()
        })
    }

    /// Unweighted surface pairing `(g, phi) -> int_Sigma g phi` of a surface
    /// datum against the top trace.
    pub fn surface_pair(&self, g: &SurfaceField<S>, phi: &VolumeField<S>) -> f64 {
        let nz = self.pack.grid.nz;
        let nh = self.pack.grid.nh();
        self.surface_sum(|n| (g.values[n] * phi.data[nz * nh + n]).to_f64_lossy())
    }

    /// Surface pairing of two plain surface slices.
    pub fn surface_pair_values(&self, g: &[S], phi: &[S]) -> f64 {
        self.surface_sum(|n| (g[n] * phi[n]).to_f64_lossy())
    }

    /// Plain (unweighted) L2 inner product with the same quadrature.
    pub fn ip_l2(&self, f: &VolumeField<S>, g: &VolumeField<S>) -> f64 {
        self.volume_sum(|idx| (f.data[idx] * g.data[idx]).to_f64_lossy())
    }

    /// Plain L2 of the coordinate gradients.
    pub fn ip_l2_grad(&self, f: &VolumeField<S>, g: &VolumeField<S>) -> f64 {
        let gf = crate::operators::raw_grad(f, self.sp);
        let gg = crate::operators::raw_grad(g, self.sp);
        self.volume_sum(|idx| {
            let mut dot = S::zero();
            for c in 0..3 {
                dot += gf.comps[c].data[idx] * gg.comps[c].data[idx];
            }
            dot.to_f64_lossy()
        })
    }
}

/// Multiplication by `K`: the isomorphism between unweighted and weighted
/// spaces.
pub fn kt_apply<S: Scalar>(theta: &VolumeField<S>, pack: &GeometryPack<S>) -> VolumeField<S> {
    theta.mul(&pack.k)
}

/// Inverse of [`kt_apply`]: pointwise multiplication by `J`.
pub fn kt_inverse<S: Scalar>(theta: &VolumeField<S>, pack: &GeometryPack<S>) -> VolumeField<S> {
    theta.mul(&pack.j)
}

/// Ratios of the weighted forms against their unweighted counterparts.
#[derive(Debug, Clone, Copy)]
pub struct NormEquivalenceReport {
    pub ratio_h0: f64,
    pub ratio_h1: f64,
}

pub fn norm_equivalence_report<S: Scalar>(
    theta: &VolumeField<S>,
    pack: &GeometryPack<S>,
    sp: &SpectralGrid<S>,
) -> Result<NormEquivalenceReport> {
    let forms = assemble_forms(pack, sp);
    let l2 = forms.ip_l2(theta, theta);
    if l2 <= 0.0 {
        return Err(Error::Mismatch(
            "norm equivalence report rejects the zero field".into(),
        ));
    }
    // a constant field has no gradient; the ratio degenerates to infinity
    let l2g = forms.ip_l2_grad(theta, theta);
    Ok(NormEquivalenceReport {
        ratio_h0: forms.ip_h0(theta, theta) / l2,
        ratio_h1: forms.ip_h1_scalar(theta, theta) / l2g,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::SurfaceField;
    use crate::geometry::geometry_pack;
    use crate::grid::Grid;
    use crate::operators::{grad_a, lap_a};
    use crate::rng::{random_smooth_volume, SplitMix64};

    fn setup(nz: usize) -> (Grid, SpectralGrid<f64>) {
        let grid = Grid::new(16, 16, nz, 1.0, 1.0).unwrap();
        let sp = SpectralGrid::new(&grid);
        (grid, sp)
    }

    #[test]
    fn flat_mass_is_slab_volume() {
        let (grid, sp) = setup(12);
        let pack = GeometryPack::flat(&grid, &sp);
        let forms = assemble_forms(&pack, &sp);
        let one = VolumeField::constant(&grid, 1.0);
        assert!((forms.ip_h0(&one, &one) - grid.l1 * grid.l2).abs() < 1e-12);
    }

    #[test]
    fn flat_linear_profile_has_unit_dirichlet_energy() {
        let (grid, sp) = setup(12);
        let pack = GeometryPack::flat(&grid, &sp);
        let forms = assemble_forms(&pack, &sp);
        let theta = VolumeField::from_fn(&grid, |_, _, z| 1.0 + z);
        assert!((forms.ip_h1_scalar(&theta, &theta) - grid.l1 * grid.l2).abs() < 1e-12);
    }

    #[test]
    fn constant_lift_mass_matches_hand_integral() {
        let (grid, sp) = setup(12);
        let c = 0.25;
        let eta = SurfaceField::constant(&grid, c);
        let pack = geometry_pack(&eta, None, &grid, 1.0, 0.1, &sp).unwrap();
        let forms = assemble_forms(&pack, &sp);
        let one = VolumeField::constant(&grid, 1.0);
        // int J = int (1 + 2c(1+z)) dz = 1 + c; J is linear in z so the
        // trapezoid rule is exact
        let want = grid.l1 * grid.l2 * (1.0 + c);
        assert!((forms.ip_h0(&one, &one) - want).abs() < 1e-12);
    }

    #[test]
    fn forms_are_symmetric_and_definite() {
        let (grid, sp) = setup(10);
        let k = 2.0 * std::f64::consts::PI / grid.l1;
        let eta = SurfaceField::from_fn(&sp, &grid, |x, _| 0.1 * (k * x).cos());
        let pack = geometry_pack(&eta, None, &grid, 0.3, 0.1, &sp).unwrap();
        let forms = assemble_forms(&pack, &sp);
        let mut rng = SplitMix64::new(23);
        for _ in 0..4 {
            let f = random_smooth_volume::<f64>(&grid, 1.0, true, &mut rng);
            let g = random_smooth_volume::<f64>(&grid, 1.0, true, &mut rng);
            assert!((forms.ip_h0(&f, &g) - forms.ip_h0(&g, &f)).abs() < 1e-12);
            assert!((forms.ip_h1_scalar(&f, &g) - forms.ip_h1_scalar(&g, &f)).abs() < 1e-12);
            assert!((forms.boundary_form(&f, &g) - forms.boundary_form(&g, &f)).abs() < 1e-12);
            assert!(forms.ip_h0(&f, &f) >= 0.0);
            assert!(forms.boundary_form(&f, &f) >= 0.0);
            // Dirichlet form positive definite on fields vanishing at the bottom
            assert!(forms.ip_h1_scalar(&f, &f) > 0.0);
        }
    }

    #[test]
    fn kt_round_trip_and_hand_value() {
        let (grid, sp) = setup(10);
        // flat: identity map
        let flat = GeometryPack::flat(&grid, &sp);
        let mut rng = SplitMix64::new(31);
        let f = random_smooth_volume::<f64>(&grid, 1.0, false, &mut rng);
        assert!(kt_apply(&f, &flat).max_abs_diff(&f) == 0.0);
        // constant lift: K = 1/(1 + 2c(1+z))
        let c = 0.2;
        let eta = SurfaceField::constant(&grid, c);
        let pack = geometry_pack(&eta, None, &grid, 1.0, 0.1, &sp).unwrap();
        let one = VolumeField::constant(&grid, 1.0);
        let kt = kt_apply(&one, &pack);
        for k in 0..=grid.nz {
            let want = 1.0 / (1.0 + 2.0 * c * (1.0 + grid.zcoord(k)));
            for n in 0..grid.nh() {
                assert!((kt.data[k * grid.nh() + n] - want).abs() < 1e-12);
            }
        }
        // round trip
        let back = kt_inverse(&kt_apply(&f, &pack), &pack);
        assert!(back.max_abs_diff(&f) < 1e-12);
        // weighted norm of the K-image of 1: int K^2 J = int K
        let forms = assemble_forms(&pack, &sp);
        let kk = forms.ip_h0(&kt, &kt);
        let kq = forms.ip_l2(&kt, &one);
        assert!((kk - kq).abs() < 1e-12);
    }

    #[test]
    fn norm_equivalence_flat_and_lifted() {
        let (grid, sp) = setup(10);
        let flat = GeometryPack::flat(&grid, &sp);
        let mut rng = SplitMix64::new(37);
        let f = random_smooth_volume::<f64>(&grid, 1.0, true, &mut rng);
        let rep = norm_equivalence_report(&f, &flat, &sp).unwrap();
        assert!((rep.ratio_h0 - 1.0).abs() < 1e-10);
        assert!((rep.ratio_h1 - 1.0).abs() < 1e-10);

        let c = 0.2;
        let eta = SurfaceField::constant(&grid, c);
        let pack = geometry_pack(&eta, None, &grid, 1.0, 0.1, &sp).unwrap();
        // zero field rejected
        assert!(norm_equivalence_report(&VolumeField::zeros(&grid), &pack, &sp).is_err());
        // weighted-mean bound: min J <= ratio_h0 <= max J
        let g = random_smooth_volume::<f64>(&grid, 1.0, true, &mut rng);
        let rep3 = norm_equivalence_report(&g, &pack, &sp).unwrap();
        let (mut jmin, mut jmax) = (f64::INFINITY, f64::NEG_INFINITY);
        for &v in &pack.j.data {
            jmin = jmin.min(v);
            jmax = jmax.max(v);
        }
        assert!(rep3.ratio_h0 >= jmin - 1e-12 && rep3.ratio_h0 <= jmax + 1e-12);
        // theta == 1 against the constant lift: the weighted mass ratio is
        // exactly 1 + c and the gradient ratio degenerates
        let one = VolumeField::constant(&grid, 1.0);
        let rep4 = norm_equivalence_report(&one, &pack, &sp).unwrap();
        assert!((rep4.ratio_h0 - (1.0 + c)).abs() < 1e-12);
        assert!(!rep4.ratio_h1.is_finite());
    }

    #[test]
    fn discrete_integration_by_parts_is_first_order() {
        // |ip_h1(theta, phi) - [-ip_h0(lap_a theta, phi)
        //   + surface(grad_a theta . N, phi)]| decays under refinement
        let mut errs = Vec::new();
        for nz in [16usize, 32, 64] {
            let (grid, sp) = setup(nz);
            let k = 2.0 * std::f64::consts::PI / grid.l1;
            let eta = SurfaceField::from_fn(&sp, &grid, |x, _| 0.05 * (k * x).cos());
            let pack = geometry_pack(&eta, None, &grid, 0.3, 0.1, &sp).unwrap();
            let forms = assemble_forms(&pack, &sp);
            let theta =
                VolumeField::from_fn(&grid, |x, _, z| (k * x).cos() * (1.2 * (1.0 + z)).sin());
            let phi = VolumeField::from_fn(&grid, |_, y, z| {
                (k * y).sin() * (1.0 + z) + (0.9 * (1.0 + z)).sin()
            });
            let lhs = forms.ip_h1_scalar(&theta, &phi);
            let lap = lap_a(&theta, &pack, &sp);
            let g = grad_a(&theta, &pack, &sp);
            let nh = grid.nh();
            let flux: Vec<f64> = (0..nh)
                .map(|n| {
                    g.comps[0].data[grid.nz * nh + n] * pack.n.comps[0][n]
                        + g.comps[1].data[grid.nz * nh + n] * pack.n.comps[1][n]
                        + g.comps[2].data[grid.nz * nh + n] * pack.n.comps[2][n]
                })
                .collect();
            let top_phi: Vec<f64> = phi.level(grid.nz).to_vec();
            let rhs = -forms.ip_h0(&lap, &phi) + forms.surface_pair_values(&flux, &top_phi);
            errs.push((lhs - rhs).abs());
        }
        let order = (errs[0] / errs[2]).log2() / 2.0;
        assert!(order > 1.0, "observed order {order}, errors {errs:?}");
    }
}
