//! Manufactured solutions for the stationary solvers.
//!
//! Data fields are produced from closed-form solution families evaluated
//! with analytic derivatives (jets), so solver error against the sampled
//! exact solution measures pure discretization error. The surface function is
//! a single horizontal mode, for which the extension profile and the whole
//! geometry pack are known in closed form.

use crate::elliptic::{
    solve_a_poisson, solve_a_stokes, solve_heat_robin, solve_stationary_benard, BenardData,
    HeatData, PoissonData, SolverOpts, StokesData,
};
use crate::error::Result;
use crate::fft::SpectralGrid;
use crate::field::{SurfaceField, VectorField, VolumeField};
use crate::geometry::{geometry_pack, GeometryPack, SurfaceVector};
use crate::grid::Grid;
use crate::Scalar;

/// Value with first and second partials at a point.
#[derive(Debug, Clone, Copy)]
pub struct Jet2 {
    pub v: f64,
    pub d: [f64; 3],
    pub dd: [[f64; 3]; 3],
}

impl Jet2 {
    pub fn zero() -> Self {
        Jet2 {
            v: 0.0,
            d: [0.0; 3],
            dd: [[0.0; 3]; 3],
        }
    }

    pub fn constant(v: f64) -> Self {
        let mut j = Self::zero();
        j.v = v;
        j
    }

    pub fn add(&self, o: &Jet2) -> Jet2 {
        let mut out = *self;
        out.v += o.v;
        for i in 0..3 {
            out.d[i] += o.d[i];
            for j in 0..3 {
                out.dd[i][j] += o.dd[i][j];
            }
        }
        out
    }

    pub fn scale(&self, s: f64) -> Jet2 {
        let mut out = *self;
        out.v *= s;
        for i in 0..3 {
            out.d[i] *= s;
            for j in 0..3 {
                out.dd[i][j] *= s;
            }
        }
        out
    }

    pub fn mul(&self, o: &Jet2) -> Jet2 {
        let mut out = Jet2::zero();
        out.v = self.v * o.v;
        for i in 0..3 {
            out.d[i] = self.d[i] * o.v + self.v * o.d[i];
            for j in 0..3 {
                out.dd[i][j] = self.dd[i][j] * o.v
                    + self.d[i] * o.d[j]
                    + self.d[j] * o.d[i]
                    + self.v * o.dd[i][j];
            }
        }
        out
    }

    /// Jet of `1 / self`.
    pub fn recip(&self) -> Jet2 {
        let mut out = Jet2::zero();
        let inv = 1.0 / self.v;
        out.v = inv;
        for i in 0..3 {
            out.d[i] = -inv * inv * self.d[i];
        }
        for i in 0..3 {
            for j in 0..3 {
                out.dd[i][j] =
                    2.0 * inv * inv * inv * self.d[i] * self.d[j] - inv * inv * self.dd[i][j];
            }
        }
        out
    }
}

/// Closed-form geometry for `eta = amp cos(kx x1)` extended with parameter
/// `eps`; `amp = 0` is the flat case.
#[derive(Debug, Clone, Copy)]
pub struct GeoJet {
    pub amp: f64,
    pub kx: f64,
    pub eps: f64,
}

impl GeoJet {
    /// `d1^(ax) d3^(az) eta_bar` at `(x, z)`.
    pub fn ebar(&self, ax: usize, az: usize, x: f64, z: f64) -> f64 {
        let alpha = self.eps * self.kx;
        let trig = match ax % 4 {
            0 => (self.kx * x).cos(),
            1 => -(self.kx * x).sin(),
            2 => -(self.kx * x).cos(),
            _ => (self.kx * x).sin(),
        };
        let (s, ds, _) = crate::geometry::extension_profile(alpha, z);
        let vert = if az % 2 == 0 {
            alpha.powi(az as i32) * s
        } else {
            alpha.powi(az as i32 - 1) * ds
        };
        self.amp * self.kx.powi(ax as i32) * trig * vert
    }

    pub fn a_jet(&self, x: f64, z: f64) -> Jet2 {
        let w = 1.0 + z;
        let e = |ax, az| self.ebar(ax, az, x, z);
        let mut out = Jet2::zero();
        out.v = w * e(1, 0);
        out.d[0] = w * e(2, 0);
        out.d[2] = e(1, 0) + w * e(1, 1);
        out.dd[0][0] = w * e(3, 0);
        out.dd[0][2] = e(2, 0) + w * e(2, 1);
        out.dd[2][0] = out.dd[0][2];
        out.dd[2][2] = 2.0 * e(1, 1) + w * e(1, 2);
        out
    }

    pub fn j_jet(&self, x: f64, z: f64) -> Jet2 {
        let w = 1.0 + z;
        let e = |ax, az| self.ebar(ax, az, x, z);
        let mut out = Jet2::zero();
        out.v = 1.0 + e(0, 0) + w * e(0, 1);
        out.d[0] = e(1, 0) + w * e(1, 1);
        out.d[2] = 2.0 * e(0, 1) + w * e(0, 2);
        out.dd[0][0] = e(2, 0) + w * e(2, 1);
        out.dd[0][2] = 2.0 * e(1, 1) + w * e(1, 2);
        out.dd[2][0] = out.dd[0][2];
        out.dd[2][2] = 3.0 * e(0, 2) + w * e(0, 3);
        out
    }

    /// The 3x3 transform matrix as jets.
    pub fn amat(&self, x: f64, z: f64) -> [[Jet2; 3]; 3] {
        let a = self.a_jet(x, z);
        let k = self.j_jet(x, z).recip();
        let zero = Jet2::zero();
        let one = Jet2::constant(1.0);
        let a02 = a.mul(&k).scale(-1.0);
        [[one, zero, a02], [zero, one, zero], [zero, zero, k]]
    }

    /// Surface normal `(-d1 eta, 0, 1)` and its magnitude at `x`.
    pub fn normal(&self, x: f64) -> ([f64; 3], f64) {
        let dx_eta = -self.amp * self.kx * (self.kx * x).sin();
        let n = [-dx_eta, 0.0, 1.0];
        (n, (n[0] * n[0] + 1.0).sqrt())
    }

    /// Nodal surface field of `eta`.
    pub fn eta_field<S: Scalar>(&self, grid: &Grid, sp: &SpectralGrid<S>) -> SurfaceField<S> {
        let amp = self.amp;
        let kx = self.kx;
        SurfaceField::from_fn(sp, grid, move |x, _| amp * (kx * x).cos())
    }

    pub fn pack<S: Scalar>(&self, grid: &Grid, sp: &SpectralGrid<S>) -> Result<GeometryPack<S>> {
        geometry_pack(&self.eta_field(grid, sp), None, grid, self.eps, 0.05, sp)
    }
}

/// `lap_A f` from jets of the transform matrix and the field.
pub fn lap_a_jet(amat: &[[Jet2; 3]; 3], f: &Jet2) -> f64 {
    let mut acc = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            for k in 0..3 {
                acc += amat[i][j].v * (amat[i][k].d[j] * f.d[k] + amat[i][k].v * f.dd[j][k]);
            }
        }
    }
    acc
}

pub fn grad_a_jet(amat: &[[Jet2; 3]; 3], f: &Jet2) -> [f64; 3] {
    let mut out = [0.0; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i] += amat[i][j].v * f.d[j];
        }
    }
    out
}

/// Symmetric transformed gradient values from first partials.
pub fn symgrad_a_jet(amat: &[[Jet2; 3]; 3], u: &[Jet2; 3]) -> [[f64; 3]; 3] {
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            for k in 0..3 {
                out[i][j] += amat[i][k].v * u[j].d[k] + amat[j][k].v * u[i].d[k];
            }
        }
    }
    out
}

/// Separable analytic field `amp * trig(mx x) * trig(my y) * H(z)` with the
/// vertical profile supplied to third order.
#[derive(Clone, Copy)]
pub struct Sep3 {
    pub amp: f64,
    pub mx: f64,
    pub cos_x: bool,
    pub my: f64,
    pub cos_y: bool,
    pub vert: [fn(f64) -> f64; 4],
}

impl Sep3 {
    fn trig(arg: f64, cosine: bool, order: usize) -> f64 {
        let shifted = arg + order as f64 * std::f64::consts::FRAC_PI_2;
        if cosine {
            shifted.cos()
        } else {
            shifted.sin()
        }
    }

    pub fn partial(&self, ax: usize, ay: usize, az: usize, x: f64, y: f64, z: f64) -> f64 {
        debug_assert!(az < 4);
        self.amp
            * self.mx.powi(ax as i32)
            * Self::trig(self.mx * x, self.cos_x, ax)
            * self.my.powi(ay as i32)
            * Self::trig(self.my * y, self.cos_y, ay)
            * (self.vert[az])(z)
    }

    /// Jet of the `(ax, ay, az)`-derivative of the field.
    pub fn jet(&self, ax: usize, ay: usize, az: usize, x: f64, y: f64, z: f64) -> Jet2 {
        let mut out = Jet2::zero();
        out.v = self.partial(ax, ay, az, x, y, z);
        let bump =
            |dx: usize, dy: usize, dz: usize| self.partial(ax + dx, ay + dy, az + dz, x, y, z);
        out.d = [bump(1, 0, 0), bump(0, 1, 0), bump(0, 0, 1)];
        out.dd[0][0] = bump(2, 0, 0);
        out.dd[1][1] = bump(0, 2, 0);
        out.dd[2][2] = bump(0, 0, 2);
        out.dd[0][1] = bump(1, 1, 0);
        out.dd[1][0] = out.dd[0][1];
        out.dd[0][2] = bump(1, 0, 1);
        out.dd[2][0] = out.dd[0][2];
        out.dd[1][2] = bump(0, 1, 1);
        out.dd[2][1] = out.dd[1][2];
        out
    }
}

fn tau(grid: &Grid) -> f64 {
    2.0 * std::f64::consts::PI / grid.l1
}

fn geo_for(grid: &Grid, curved: bool) -> GeoJet {
    GeoJet {
        amp: if curved { 0.1 } else { 0.0 },
        kx: tau(grid),
        eps: 0.25,
    }
}

// vertical profiles of the manufactured families; each quadruple is the
// profile and its first three derivatives
const HP_FREQ: f64 = 2.3;
const HP_PHASE: f64 = 0.4;
fn hp0(z: f64) -> f64 {
    (HP_PHASE + HP_FREQ * (1.0 + z)).cos()
}
fn hp1(z: f64) -> f64 {
    -HP_FREQ * (HP_PHASE + HP_FREQ * (1.0 + z)).sin()
}
fn hp2(z: f64) -> f64 {
    -HP_FREQ.powi(2) * (HP_PHASE + HP_FREQ * (1.0 + z)).cos()
}
fn hp3(z: f64) -> f64 {
    HP_FREQ.powi(3) * (HP_PHASE + HP_FREQ * (1.0 + z)).sin()
}

const HT_FREQ: f64 = 2.1;
fn ht0(z: f64) -> f64 {
    (HT_FREQ * (1.0 + z)).sin()
}
fn ht1(z: f64) -> f64 {
    HT_FREQ * (HT_FREQ * (1.0 + z)).cos()
}
fn ht2(z: f64) -> f64 {
    -HT_FREQ.powi(2) * (HT_FREQ * (1.0 + z)).sin()
}
fn ht3(z: f64) -> f64 {
    -HT_FREQ.powi(3) * (HT_FREQ * (1.0 + z)).cos()
}

// psi = (1+z)^2 exp(z): psi(-1) = psi'(-1) = 0
fn psi0(z: f64) -> f64 {
    (1.0 + z) * (1.0 + z) * z.exp()
}
fn psi1(z: f64) -> f64 {
    ((1.0 + z) * (1.0 + z) + 2.0 * (1.0 + z)) * z.exp()
}
fn psi2(z: f64) -> f64 {
    ((1.0 + z) * (1.0 + z) + 4.0 * (1.0 + z) + 2.0) * z.exp()
}
fn psi3(z: f64) -> f64 {
    ((1.0 + z) * (1.0 + z) + 6.0 * (1.0 + z) + 6.0) * z.exp()
}

// chi vertical profile (1+z)^2 (1 - z/2)
fn chv0(z: f64) -> f64 {
    (1.0 + z) * (1.0 + z) * (1.0 - 0.5 * z)
}
fn chv1(z: f64) -> f64 {
    2.0 * (1.0 + z) * (1.0 - 0.5 * z) - 0.5 * (1.0 + z) * (1.0 + z)
}
fn chv2(z: f64) -> f64 {
    2.0 * (1.0 - 0.5 * z) - 2.0 * (1.0 + z)
}
fn chv3(_z: f64) -> f64 {
    -3.0
}

// pressure profile of the Stokes family
const HQ_FREQ: f64 = 1.4;
const HQ_PHASE: f64 = 0.7;
fn hq0(z: f64) -> f64 {
    (HQ_PHASE + HQ_FREQ * (1.0 + z)).sin()
}
fn hq1(z: f64) -> f64 {
    HQ_FREQ * (HQ_PHASE + HQ_FREQ * (1.0 + z)).cos()
}
fn hq2(z: f64) -> f64 {
    -HQ_FREQ.powi(2) * (HQ_PHASE + HQ_FREQ * (1.0 + z)).sin()
}
fn hq3(z: f64) -> f64 {
    -HQ_FREQ.powi(3) * (HQ_PHASE + HQ_FREQ * (1.0 + z)).cos()
}

/// Exact Stokes pair: `u = M w` with `w = curl(0, phi, chi)`, so the
/// transformed divergence vanishes identically and `u = 0` on the bottom.
pub struct StokesExact {
    geo: GeoJet,
    phi: Sep3,
    chi: Sep3,
    pres: Sep3,
}

impl StokesExact {
    pub fn new(grid: &Grid, curved: bool) -> Self {
        let geo = geo_for(grid, curved);
        let k = tau(grid);
        let q = 2.0 * std::f64::consts::PI / grid.l2;
        StokesExact {
            geo,
            phi: Sep3 {
                amp: 0.5,
                mx: k,
                cos_x: true,
                my: 0.0,
                cos_y: true,
                vert: [psi0, psi1, psi2, psi3],
            },
            chi: Sep3 {
                amp: 0.25,
                mx: k,
                cos_x: true,
                my: q,
                cos_y: true,
                vert: [chv0, chv1, chv2, chv3],
            },
            pres: Sep3 {
                amp: 0.5,
                mx: k,
                cos_x: true,
                my: 0.0,
                cos_y: true,
                vert: [hq0, hq1, hq2, hq3],
            },
        }
    }

    /// Jets of the three velocity components and the pressure.
    pub fn jets(&self, x: f64, y: f64, z: f64) -> ([Jet2; 3], Jet2) {
        // w = curl(0, phi, chi) = (d2 chi - d3 phi, -d1 chi, d1 phi)
        let w1 = self
            .chi
            .jet(0, 1, 0, x, y, z)
            .add(&self.phi.jet(0, 0, 1, x, y, z).scale(-1.0));
        let w2 = self.chi.jet(1, 0, 0, x, y, z).scale(-1.0);
        let w3 = self.phi.jet(1, 0, 0, x, y, z);
        let a = self.geo.a_jet(x, z);
        let k = self.geo.j_jet(x, z).recip();
        let u1 = k.mul(&w1);
        let u2 = k.mul(&w2);
        let u3 = k.mul(&a).mul(&w1).add(&w3);
        let p = self.pres.jet(0, 0, 0, x, y, z);
        ([u1, u2, u3], p)
    }

    pub fn velocity_field<S: Scalar>(&self, grid: &Grid) -> VectorField<S> {
        let mut u = VectorField::zeros(grid);
        for k in 0..=grid.nz {
            let z = grid.zcoord(k);
            for j in 0..grid.ny {
                let y = grid.ycoord(j);
                for i in 0..grid.nx {
                    let x = grid.xcoord(i);
                    let (uj, _) = self.jets(x, y, z);
                    let idx = u.comps[0].idx(i, j, k);
                    for c in 0..3 {
                        u.comps[c].data[idx] = S::lit(uj[c].v);
                    }
                }
            }
        }
        u
    }

    pub fn pressure_field<S: Scalar>(&self, grid: &Grid) -> VolumeField<S> {
        let pres = self.pres;
        VolumeField::from_fn(grid, move |x, y, z| pres.partial(0, 0, 0, x, y, z))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MfKind {
    Poisson,
    Heat,
    Stokes,
    Coupled,
}

impl MfKind {
    pub fn name(&self) -> &'static str {
        match self {
            MfKind::Poisson => "poisson",
            MfKind::Heat => "heat-robin",
            MfKind::Stokes => "stokes",
            MfKind::Coupled => "coupled",
        }
    }

    pub const ALL: [MfKind; 4] = [
        MfKind::Poisson,
        MfKind::Heat,
        MfKind::Stokes,
        MfKind::Coupled,
    ];
}

/// Max-norm solver error against the sampled exact solution.
pub fn manufactured_error(kind: MfKind, curved: bool, nz: usize, opts: &SolverOpts) -> Result<f64> {
    let grid = Grid::new(16, 16, nz, 1.0, 1.0)?;
    let sp = SpectralGrid::<f64>::new(&grid);
    let geo = geo_for(&grid, curved);
    let pack = geo.pack(&grid, &sp)?;
    match kind {
        MfKind::Poisson => {
            let exact = Sep3 {
                amp: 1.0,
                mx: tau(&grid),
                cos_x: true,
                my: 0.0,
                cos_y: true,
                vert: [hp0, hp1, hp2, hp3],
            };
            let mut f1 = VolumeField::zeros(&grid);
            for k in 0..=grid.nz {
                let z = grid.zcoord(k);
                for j in 0..grid.ny {
                    let y = grid.ycoord(j);
                    for i in 0..grid.nx {
                        let x = grid.xcoord(i);
                        let amat = geo.amat(x, z);
                        let pj = exact.jet(0, 0, 0, x, y, z);
                        let idx = f1.idx(i, j, k);
                        f1.data[idx] = lap_a_jet(&amat, &pj);
                    }
                }
            }
            let f2 = SurfaceField::from_fn(&sp, &grid, |x, y| exact.partial(0, 0, 0, x, y, 0.0));
            let geo2 = geo;
            let f3 = SurfaceField::from_fn(&sp, &grid, move |x, y| {
                let amat = geo2.amat(x, -1.0);
                let pj = exact.jet(0, 0, 0, x, y, -1.0);
                -grad_a_jet(&amat, &pj)[2]
            });
            let p = solve_a_poisson(&pack, &sp, &PoissonData { f1, f2, f3 }, opts)?;
            let want = VolumeField::from_fn(&grid, |x, y, z| exact.partial(0, 0, 0, x, y, z));
            Ok(p.max_abs_diff(&want))
        }
        MfKind::Heat => {
            let exact = Sep3 {
                amp: 1.0,
                mx: tau(&grid),
                cos_x: true,
                my: 0.0,
                cos_y: true,
                vert: [ht0, ht1, ht2, ht3],
            };
            let (f3, f5) = heat_data(&grid, &sp, &geo, &exact);
            let theta = solve_heat_robin(&pack, &sp, &HeatData { f3, f5 }, opts)?;
            let want = VolumeField::from_fn(&grid, |x, y, z| exact.partial(0, 0, 0, x, y, z));
            Ok(theta.max_abs_diff(&want))
        }
        MfKind::Stokes => {
            let exact = StokesExact::new(&grid, curved);
            let (f1, f2, f4) = stokes_data(&grid, &geo, &exact, None);
            let (u, p) = solve_a_stokes(&pack, &sp, &StokesData { f1, f2, f4 }, opts)?;
            let uerr = u.max_abs_diff(&exact.velocity_field(&grid));
            let perr = p.max_abs_diff(&exact.pressure_field(&grid));
            Ok(uerr.max(perr))
        }
        MfKind::Coupled => {
            let th_exact = Sep3 {
                amp: 0.8,
                mx: tau(&grid),
                cos_x: true,
                my: 0.0,
                cos_y: true,
                vert: [ht0, ht1, ht2, ht3],
            };
            let exact = StokesExact::new(&grid, curved);
            let (f3, f5) = heat_data(&grid, &sp, &geo, &th_exact);
            let (f1, f2, f4) = stokes_data(&grid, &geo, &exact, Some(&th_exact));
            let (u, p, theta) =
                solve_stationary_benard(&pack, &sp, &BenardData { f1, f2, f3, f4, f5 }, opts)?;
            let uerr = u.max_abs_diff(&exact.velocity_field(&grid));
            let perr = p.max_abs_diff(&exact.pressure_field(&grid));
            let terr = theta.max_abs_diff(&VolumeField::from_fn(&grid, |x, y, z| {
                th_exact.partial(0, 0, 0, x, y, z)
            }));
            Ok(uerr.max(perr).max(terr))
        }
    }
}

fn heat_data(
    grid: &Grid,
    sp: &SpectralGrid<f64>,
    geo: &GeoJet,
    exact: &Sep3,
) -> (VolumeField<f64>, SurfaceField<f64>) {
    let mut f3 = VolumeField::zeros(grid);
    for k in 0..=grid.nz {
        let z = grid.zcoord(k);
        for j in 0..grid.ny {
            let y = grid.ycoord(j);
            for i in 0..grid.nx {
                let x = grid.xcoord(i);
                let amat = geo.amat(x, z);
                let tj = exact.jet(0, 0, 0, x, y, z);
                let idx = f3.idx(i, j, k);
                f3.data[idx] = -lap_a_jet(&amat, &tj);
            }
        }
    }
    let geo2 = *geo;
    let exact2 = *exact;
    let f5 = SurfaceField::from_fn(sp, grid, move |x, y| {
        let amat = geo2.amat(x, 0.0);
        let tj = exact2.jet(0, 0, 0, x, y, 0.0);
        let g = grad_a_jet(&amat, &tj);
        let (n, nmag) = geo2.normal(x);
        g[0] * n[0] + g[1] * n[1] + g[2] * n[2] + tj.v * nmag
    });
    (f3, f5)
}

fn stokes_data(
    grid: &Grid,
    geo: &GeoJet,
    exact: &StokesExact,
    buoyancy: Option<&Sep3>,
) -> (VectorField<f64>, VolumeField<f64>, SurfaceVector<f64>) {
    let mut f1 = VectorField::zeros(grid);
    // the exact velocity is transformed-divergence-free by construction
    let f2 = VolumeField::zeros(grid);
    let mut f4 = SurfaceVector::zeros(grid.nh());
    for k in 0..=grid.nz {
        let z = grid.zcoord(k);
        for j in 0..grid.ny {
            let y = grid.ycoord(j);
            for i in 0..grid.nx {
                let x = grid.xcoord(i);
                let amat = geo.amat(x, z);
                let (uj, pj) = exact.jets(x, y, z);
                let gp = grad_a_jet(&amat, &pj);
                let idx = f1.comps[0].idx(i, j, k);
                for c in 0..3 {
                    let lap = lap_a_jet(&amat, &uj[c]);
                    f1.comps[c].data[idx] = gp[c] - lap;
                }
                if let Some(th) = buoyancy {
                    f1.comps[2].data[idx] -= th.partial(0, 0, 0, x, y, z);
                }
            }
        }
    }
    for j in 0..grid.ny {
        let y = grid.ycoord(j);
        for i in 0..grid.nx {
            let x = grid.xcoord(i);
            let amat = geo.amat(x, 0.0);
            let (uj, pj) = exact.jets(x, y, 0.0);
            let sg = symgrad_a_jet(&amat, &uj);
            let (n, _) = geo.normal(x);
            for c in 0..3 {
                let mut acc = pj.v * n[c];
                for d in 0..3 {
                    acc -= sg[c][d] * n[d];
                }
                f4.comps[c][j * grid.nx + i] = acc;
            }
        }
    }
    (f1, f2, f4)
}

#[derive(Debug, Clone, Copy)]
pub struct ConvergenceRow {
    pub nz: usize,
    pub err: f64,
}

/// Solves the manufactured case over a vertical refinement ladder.
pub fn convergence_table(
    kind: MfKind,
    curved: bool,
    nzs: &[usize],
    opts: &SolverOpts,
) -> Result<Vec<ConvergenceRow>> {
    nzs.iter()
        .map(|&nz| {
            Ok(ConvergenceRow {
                nz,
                err: manufactured_error(kind, curved, nz, opts)?,
            })
        })
        .collect()
}

/// Least-squares slope of log2(err) against log2(nz), sign flipped so that
/// second-order decay reports ~2.
pub fn observed_order(rows: &[ConvergenceRow]) -> f64 {
    let n = rows.len() as f64;
    let xs: Vec<f64> = rows.iter().map(|r| (r.nz as f64).log2()).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.err.max(1e-300).log2()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let num: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let den: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    -(num / den)
}
