//! Stationary solvers in slab coordinates: the transformed Poisson problem,
//! the Robin heat problem, the transformed Stokes problem with stress
//! boundary conditions, and the coupled stationary convection solve.
//!
//! Discretization: strong collocation rows built from the spectral/FD
//! operators of [`crate::operators`]. The saddle pressure lives on vertical
//! cell centers (staggered) to keep the system free of an odd-even pressure
//! mode; cell-to-node interpolation is quadratic, so quadratic-in-depth
//! pressures are represented exactly. Systems are solved matrix-free with
//! restarted GMRES, right-preconditioned by exact per-Fourier-mode solves of
//! the flat-geometry operator (dense LU per mode, conjugate pairs shared).

use crate::error::Result;
use crate::fft::SpectralGrid;
use crate::field::{SurfaceField, VectorField, VolumeField};
use crate::geometry::{GeometryPack, SurfaceVector};
use crate::grid::Grid;
use crate::linalg::{gmres, DenseLu, GmresParams, GmresStats};
use crate::operators::{
    apply_amat, dz, dz_stencil, dzz_stencil, grad_a, lap_a, lap_a_expanded, matrix_dot_normal_top,
    symgrad_a,
};
use crate::Scalar;
use num_complex::Complex;

#[derive(Debug, Clone, Copy)]
pub struct SolverOpts {
    pub tol: f64,
    pub max_iter: usize,
    pub restart: usize,
    /// Worker threads for the per-mode preconditioner solves; 1 is the
    /// deterministic single-thread mode (results are bitwise identical
    /// either way, the mode solves are independent).
    pub threads: usize,
}

impl Default for SolverOpts {
    fn default() -> Self {
        SolverOpts {
            tol: 1e-10,
            max_iter: 800,
            restart: 60,
            threads: 1,
        }
    }
}

impl SolverOpts {
    fn gmres(&self) -> GmresParams {
        GmresParams {
            restart: self.restart,
            max_iter: self.max_iter,
            tol: self.tol,
        }
    }
}

/// Dense vertical derivative matrices (units 1/h, 1/h^2) shared by the
/// per-mode blocks; entries mirror the stencils of the volume operators.
fn dz_matrix(nz: usize, h: f64) -> Vec<f64> {
    let m = nz + 1;
    let mut out = vec![0.0; m * m];
    for k in 0..m {
        for (src, c) in dz_stencil(k, nz) {
            out[k * m + src] += c / h;
        }
    }
    out
}

fn dzz_matrix(nz: usize, h: f64) -> Vec<f64> {
    let m = nz + 1;
    let mut out = vec![0.0; m * m];
    for k in 0..m {
        for (src, c) in dzz_stencil(k, nz) {
            out[k * m + src] += c / (h * h);
        }
    }
    out
}

fn matmul(a: &[f64], b: &[f64], m: usize) -> Vec<f64> {
    let mut out = vec![0.0; m * m];
    for i in 0..m {
        for k in 0..m {
            let aik = a[i * m + k];
            if aik == 0.0 {
                continue;
            }
            for j in 0..m {
                out[i * m + j] += aik * b[k * m + j];
            }
        }
    }
    out
}

/// Quadratic interpolation weights from vertical cell centers to node `k`;
/// exact for polynomials of degree two in depth.
pub fn cell_to_node_stencil(k: usize, nz: usize) -> Vec<(usize, f64)> {
    if k == 0 {
        vec![(0, 15.0 / 8.0), (1, -5.0 / 4.0), (2, 3.0 / 8.0)]
    } else if k == nz {
        vec![
            (nz - 1, 15.0 / 8.0),
            (nz - 2, -5.0 / 4.0),
            (nz - 3, 3.0 / 8.0),
        ]
    } else if k == nz - 1 {
        vec![
            (nz - 3, -1.0 / 8.0),
            (nz - 2, 3.0 / 4.0),
            (nz - 1, 3.0 / 8.0),
        ]
    } else {
        vec![(k - 1, 3.0 / 8.0), (k, 3.0 / 4.0), (k + 1, -1.0 / 8.0)]
    }
}

/// Interpolates a cell-centered vertical stack (length `nh * nz`) to nodes.
pub fn cells_to_nodes<S: Scalar>(cells: &[S], grid: &Grid) -> VolumeField<S> {
    let nh = grid.nh();
    let nz = grid.nz;
    debug_assert_eq!(cells.len(), nh * nz);
    let mut out = VolumeField::zeros(grid);
    for k in 0..=nz {
        let st: Vec<(usize, S)> = cell_to_node_stencil(k, nz)
            .into_iter()
            .map(|(src, c)| (src, S::lit(c)))
            .collect();
        for n in 0..nh {
            let mut acc = S::zero();
            for &(src, c) in &st {
                acc += c * cells[src * nh + n];
            }
            out.data[k * nh + n] = acc;
        }
    }
    out
}

/// Compact two-cell vertical derivative at interior nodes (midpoint rule);
/// boundary node slots are zero (never used by the assembled rows).
pub fn cell_diff_to_nodes<S: Scalar>(cells: &[S], grid: &Grid) -> VolumeField<S> {
    let nh = grid.nh();
    let nz = grid.nz;
    let hinv = S::lit(1.0 / grid.hz());
    let mut out = VolumeField::zeros(grid);
    for k in 1..nz {
        for n in 0..nh {
            out.data[k * nh + n] = (cells[k * nh + n] - cells[(k - 1) * nh + n]) * hinv;
        }
    }
    out
}

/// Restriction of a nodal field to cell centers (two-point average).
pub fn nodes_to_cells<S: Scalar>(f: &VolumeField<S>, grid: &Grid) -> Vec<S> {
    let nh = grid.nh();
    let nz = grid.nz;
    let half = S::lit(0.5);
    let mut out = vec![S::zero(); nh * nz];
    for k in 0..nz {
        for n in 0..nh {
            out[k * nh + n] = half * (f.data[k * nh + n] + f.data[(k + 1) * nh + n]);
        }
    }
    out
}

/// Compact vertical derivative of a nodal field evaluated at cell centers.
pub fn node_diff_to_cells<S: Scalar>(f: &VolumeField<S>, grid: &Grid) -> Vec<S> {
    let nh = grid.nh();
    let nz = grid.nz;
    let hinv = S::lit(1.0 / grid.hz());
    let mut out = vec![S::zero(); nh * nz];
    for k in 0..nz {
        for n in 0..nh {
            out[k * nh + n] = (f.data[(k + 1) * nh + n] - f.data[k * nh + n]) * hinv;
        }
    }
    out
}

/// Transformed divergence collocated at vertical cell centers: horizontal
/// derivative terms are node-pair averages, vertical derivatives compact
/// two-node differences, coefficients averaged to the cells. This is the
/// discrete dual of the staggered pressure gradient.
pub fn div_a_cells<S: Scalar>(
    u: &VectorField<S>,
    pack: &GeometryPack<S>,
    sp: &SpectralGrid<S>,
) -> Vec<S> {
    let grid = pack.grid;
    let nh = grid.nh();
    let nz = grid.nz;
    let horiz = crate::operators::dx(&u.comps[0], sp).add(&crate::operators::dy(&u.comps[1], sp));
    let havg = nodes_to_cells(&horiz, &grid);
    let du1 = node_diff_to_cells(&u.comps[0], &grid);
    let du2 = node_diff_to_cells(&u.comps[1], &grid);
    let du3 = node_diff_to_cells(&u.comps[2], &grid);
    let half = S::lit(0.5);
    let mut out = vec![S::zero(); nh * nz];
    for k in 0..nz {
        for n in 0..nh {
            let lo = k * nh + n;
            let hi = (k + 1) * nh + n;
            let ak = half * (pack.a.data[lo] * pack.k.data[lo] + pack.a.data[hi] * pack.k.data[hi]);
            let bk = half * (pack.b.data[lo] * pack.k.data[lo] + pack.b.data[hi] * pack.k.data[hi]);
            let kk = half * (pack.k.data[lo] + pack.k.data[hi]);
            out[lo] = havg[lo] - ak * du1[lo] - bk * du2[lo] + kk * du3[lo];
        }
    }
    out
}

/// Which scalar problem a per-mode block represents.
#[derive(Debug, Clone, Copy)]
pub enum ScalarKind {
    /// Composed-Laplacian rows, Dirichlet top, Neumann bottom.
    Poisson,
    /// Expanded-Laplacian rows, Robin top, Dirichlet bottom; optional
    /// mass/diffusion weights for implicit time stepping.
    Heat {
        mass_over_dt: f64,
        diffusion_weight: f64,
    },
}

/// Per-Fourier-mode LU blocks of the flat-geometry operator. Fields may have
/// different vertical extents (nodes vs cells).
pub struct ModePrecond<S: Scalar> {
    nx: usize,
    ny: usize,
    /// Vertical length of each packed field.
    field_levels: Vec<usize>,
    modes: Vec<(usize, usize, Option<(usize, usize)>)>,
    blocks: Vec<DenseLu<S>>,
    threads: usize,
}

impl<S: Scalar> ModePrecond<S> {
    fn canonical_modes(nx: usize, ny: usize) -> Vec<(usize, usize, Option<(usize, usize)>)> {
        let mut out = Vec::new();
        for j in 0..ny {
            for i in 0..nx {
                let ic = (nx - i) % nx;
                let jc = (ny - j) % ny;
                if (j, i) < (jc, ic) {
                    out.push((i, j, Some((ic, jc))));
                } else if (j, i) == (jc, ic) {
                    out.push((i, j, None));
                }
            }
        }
        out
    }

    fn build(
        sp: &SpectralGrid<S>,
        field_levels: Vec<usize>,
        fill: impl Fn(f64, f64, &mut [Complex<S>], usize),
    ) -> Result<Self> {
        let dim: usize = field_levels.iter().sum();
        let modes = Self::canonical_modes(sp.nx, sp.ny);
        let mut blocks = Vec::with_capacity(modes.len());
        for &(i, j, _) in &modes {
            let mut mat = vec![Complex::new(S::zero(), S::zero()); dim * dim];
            fill(sp.d1[i], sp.d2[j], &mut mat, dim);
            blocks.push(DenseLu::factor(mat, dim)?);
        }
        Ok(ModePrecond {
            nx: sp.nx,
            ny: sp.ny,
            field_levels,
            modes,
            blocks,
            threads: 1,
        })
    }

    /// Number of worker threads used for the independent mode solves.
    pub fn set_threads(&mut self, threads: usize) {
        self.threads = threads.max(1);
    }

    /// Applies the block inverses to a packed field-major vector.
    pub fn apply(&self, sp: &SpectralGrid<S>, x: &[S], y: &mut [S]) {
        let nh = self.nx * self.ny;
        let total_levels: usize = self.field_levels.iter().sum();
        debug_assert_eq!(x.len(), total_levels * nh);
        let mut spectra: Vec<Vec<Complex<S>>> = Vec::with_capacity(total_levels);
        let mut offset = 0usize;
        for &levels in &self.field_levels {
            for k in 0..levels {
                let level = &x[offset + k * nh..offset + (k + 1) * nh];
                spectra.push(sp.forward(level));
            }
            offset += levels * nh;
        }
        let mut out_spectra = vec![vec![Complex::new(S::zero(), S::zero()); nh]; total_levels];
        let dim = total_levels;
        // solve every canonical mode block (independent; runs on the
        // configured worker threads, bitwise identical either way)
        let mut solutions = vec![vec![Complex::new(S::zero(), S::zero()); dim]; self.modes.len()];
        let solve_one = |idx: usize, v: &mut Vec<Complex<S>>| {
            let (i, j, _) = self.modes[idx];
            let slot = j * self.nx + i;
            for lvl in 0..total_levels {
                v[lvl] = spectra[lvl][slot];
            }
            self.blocks[idx].solve(v);
        };
        if self.threads <= 1 || self.modes.len() < 2 * self.threads {
            for (idx, v) in solutions.iter_mut().enumerate() {
                solve_one(idx, v);
            }
        } else {
            let chunk = self.modes.len().div_ceil(self.threads);
            std::thread::scope(|scope| {
                for (c, block) in solutions.chunks_mut(chunk).enumerate() {
                    let solve_one = &solve_one;
                    scope.spawn(move || {
                        for (off, v) in block.iter_mut().enumerate() {
                            solve_one(c * chunk + off, v);
                        }
                    });
                }
            });
        }
        for (idx, &(i, j, partner)) in self.modes.iter().enumerate() {
            let slot = j * self.nx + i;
            let v = &solutions[idx];
            for lvl in 0..total_levels {
                out_spectra[lvl][slot] = v[lvl];
            }
            if let Some((ic, jc)) = partner {
                let pslot = jc * self.nx + ic;
                for lvl in 0..total_levels {
                    out_spectra[lvl][pslot] = v[lvl].conj();
                }
            }
        }
        let mut offset = 0usize;
        let mut lvl = 0usize;
        for &levels in &self.field_levels {
            for k in 0..levels {
                let level = sp.inverse(&out_spectra[lvl]);
                y[offset + k * nh..offset + (k + 1) * nh].copy_from_slice(&level);
                lvl += 1;
            }
            offset += levels * nh;
        }
    }
}

/// Builds the flat per-mode block for a scalar problem.
pub fn scalar_precond<S: Scalar>(
    grid: &Grid,
    sp: &SpectralGrid<S>,
    kind: ScalarKind,
) -> Result<ModePrecond<S>> {
    let nz = grid.nz;
    let m = nz + 1;
    let h = grid.hz();
    let dzm = dz_matrix(nz, h);
    let dzzm = dzz_matrix(nz, h);
    let dz2 = matmul(&dzm, &dzm, m);
    ModePrecond::build(sp, vec![m], |d1, d2, mat, dim| {
        debug_assert_eq!(dim, m);
        let ksq = S::lit(d1 * d1 + d2 * d2);
        match kind {
            ScalarKind::Poisson => {
                for k in 0..m {
                    if k == nz {
                        mat[k * m + k] = Complex::new(S::one(), S::zero());
                    } else if k == 0 {
                        // -(K dz p) at the bottom, flat K = 1
                        for src in 0..m {
                            mat[src] = Complex::new(S::lit(-dzm[src]), S::zero());
                        }
                    } else {
                        for src in 0..m {
                            mat[k * m + src] = Complex::new(S::lit(dz2[k * m + src]), S::zero());
                        }
                        mat[k * m + k] -= Complex::new(ksq, S::zero());
                    }
                }
            }
            ScalarKind::Heat {
                mass_over_dt,
                diffusion_weight,
            } => {
                let w = S::lit(diffusion_weight);
                for k in 0..m {
                    if k == 0 {
                        mat[k * m + k] = Complex::new(S::one(), S::zero());
                    } else if k == nz {
                        // Robin: dz theta + theta at the top
                        for src in 0..m {
                            mat[k * m + src] = Complex::new(S::lit(dzm[nz * m + src]), S::zero());
                        }
                        mat[k * m + k] += Complex::new(S::one(), S::zero());
                    } else {
                        for src in 0..m {
                            mat[k * m + src] =
                                Complex::new(-w * S::lit(dzzm[k * m + src]), S::zero());
                        }
                        mat[k * m + k] += Complex::new(w * ksq + S::lit(mass_over_dt), S::zero());
                    }
                }
            }
        }
    })
}

/// Builds the flat per-mode saddle block for the velocity/pressure system
/// with staggered pressure.
pub fn velocity_precond<S: Scalar>(
    grid: &Grid,
    sp: &SpectralGrid<S>,
    mass_over_dt: f64,
    diffusion_weight: f64,
) -> Result<ModePrecond<S>> {
    let nz = grid.nz;
    let m = nz + 1;
    let h = grid.hz();
    let dzm = dz_matrix(nz, h);
    let dzzm = dzz_matrix(nz, h);
    ModePrecond::build(sp, vec![m, m, m, nz], |d1, d2, mat, dim| {
        let ksq = d1 * d1 + d2 * d2;
        let w = diffusion_weight;
        let at = |c: usize, k: usize| c * m + k;
        let pcell = |r: usize| 3 * m + r;
        let mut set = |r: usize, c: usize, re: f64, im: f64| {
            mat[r * dim + c] += Complex::new(S::lit(re), S::lit(im));
        };
        for c in 0..3usize {
            // bottom Dirichlet rows
            set(at(c, 0), at(c, 0), 1.0, 0.0);
            // interior momentum rows
            for k in 1..nz {
                set(at(c, k), at(c, k), mass_over_dt + w * ksq, 0.0);
                for src in 0..m {
                    set(at(c, k), at(c, src), -w * dzzm[k * m + src], 0.0);
                }
                match c {
                    0 | 1 => {
                        let d = if c == 0 { d1 } else { d2 };
                        for (src, cw) in cell_to_node_stencil(k, nz) {
                            set(at(c, k), pcell(src), 0.0, d * cw);
                        }
                    }
                    _ => {
                        // compact cell difference
                        set(at(2, k), pcell(k), 1.0 / h, 0.0);
                        set(at(2, k), pcell(k - 1), -1.0 / h, 0.0);
                    }
                }
            }
        }
        // top stress rows (boundary conditions, unweighted); flat normal e3
        for src in 0..m {
            set(at(0, nz), at(0, src), -dzm[nz * m + src], 0.0);
            set(at(1, nz), at(1, src), -dzm[nz * m + src], 0.0);
            set(at(2, nz), at(2, src), -2.0 * dzm[nz * m + src], 0.0);
        }
        set(at(0, nz), at(2, nz), 0.0, -d1);
        set(at(1, nz), at(2, nz), 0.0, -d2);
        for (src, cw) in cell_to_node_stencil(nz, nz) {
            set(at(2, nz), pcell(src), cw, 0.0);
        }
        // divergence rows collocated at the pressure cells: horizontal
        // derivatives averaged from the two bounding nodes, vertical compact
        for r in 0..nz {
            set(pcell(r), at(0, r), 0.0, 0.5 * d1);
            set(pcell(r), at(0, r + 1), 0.0, 0.5 * d1);
            set(pcell(r), at(1, r), 0.0, 0.5 * d2);
            set(pcell(r), at(1, r + 1), 0.0, 0.5 * d2);
            set(pcell(r), at(2, r + 1), 1.0 / h, 0.0);
            set(pcell(r), at(2, r), -1.0 / h, 0.0);
        }
    })
}

fn wrap_scalar<S: Scalar>(grid: &Grid, data: Vec<S>) -> VolumeField<S> {
    VolumeField {
        nx: grid.nx,
        ny: grid.ny,
        nz: grid.nz,
        data,
    }
}

/// Strong collocation rows of the scalar problems.
pub struct ScalarSystem<'a, S: Scalar> {
    pub pack: &'a GeometryPack<S>,
    pub sp: &'a SpectralGrid<S>,
    pub kind: ScalarKind,
}

impl<'a, S: Scalar> ScalarSystem<'a, S> {
    pub fn apply(&self, x: &[S], y: &mut [S]) {
        let grid = self.pack.grid;
        let nh = grid.nh();
        let nz = grid.nz;
        let f = wrap_scalar(&grid, x.to_vec());
        match self.kind {
            ScalarKind::Poisson => {
                let lap = lap_a(&f, self.pack, self.sp);
                let g3 = self.pack.k.mul(&dz(&f));
                for k in 0..=nz {
                    for n in 0..nh {
                        let idx = k * nh + n;
                        y[idx] = if k == nz {
                            f.data[idx]
                        } else if k == 0 {
                            -g3.data[idx]
                        } else {
                            lap.data[idx]
                        };
                    }
                }
            }
            ScalarKind::Heat {
                mass_over_dt,
                diffusion_weight,
            } => {
                let lap = lap_a_expanded(&f, self.pack, self.sp);
                let grad = grad_a(&f, self.pack, self.sp);
                let md = S::lit(mass_over_dt);
                let w = S::lit(diffusion_weight);
                for k in 0..=nz {
                    for n in 0..nh {
                        let idx = k * nh + n;
                        y[idx] = if k == 0 {
                            f.data[idx]
                        } else if k == nz {
                            grad.comps[0].data[idx] * self.pack.n.comps[0][n]
                                + grad.comps[1].data[idx] * self.pack.n.comps[1][n]
                                + grad.comps[2].data[idx] * self.pack.n.comps[2][n]
                                + f.data[idx] * self.pack.nmag[n]
                        } else {
                            md * f.data[idx] - w * lap.data[idx]
                        };
                    }
                }
            }
        }
    }

    pub fn solve(
        &self,
        rhs: &[S],
        precond: &ModePrecond<S>,
        x0: Option<&[S]>,
        opts: &SolverOpts,
    ) -> Result<(VolumeField<S>, GmresStats)> {
        let grid = self.pack.grid;
        let n = grid.nvol();
        let mut x = match x0 {
            Some(v) => v.to_vec(),
            None => vec![S::zero(); n],
        };
        let apply = |v: &[S], out: &mut [S]| self.apply(v, out);
        let mp = |v: &[S], out: &mut [S]| precond.apply(self.sp, v, out);
        let stats = gmres(n, &apply, &mp, rhs, &mut x, opts.gmres())?;
        Ok((wrap_scalar(&grid, x), stats))
    }
}

/// Strong collocation rows of the velocity/pressure saddle system with
/// cell-centered pressure. Packed layout: `u1, u2, u3` on nodes then `p` on
/// cells.
pub struct VelocitySystem<'a, S: Scalar> {
    pub pack: &'a GeometryPack<S>,
    pub sp: &'a SpectralGrid<S>,
    pub mass_over_dt: f64,
    pub diffusion_weight: f64,
}

impl<'a, S: Scalar> VelocitySystem<'a, S> {
    pub fn ndof(&self) -> usize {
        let grid = self.pack.grid;
        3 * grid.nvol() + grid.nh() * grid.nz
    }

    /// Splits the packed vector into velocity and node-interpolated pressure.
    pub fn unpack(&self, x: &[S]) -> (VectorField<S>, VolumeField<S>) {
        let grid = self.pack.grid;
        let n = grid.nvol();
        let u = VectorField::from_comps(
            wrap_scalar(&grid, x[0..n].to_vec()),
            wrap_scalar(&grid, x[n..2 * n].to_vec()),
            wrap_scalar(&grid, x[2 * n..3 * n].to_vec()),
        );
        let p = cells_to_nodes(&x[3 * n..], &grid);
        (u, p)
    }

    /// Packs nodal fields into the unknown layout (pressure restricted to
    /// cells); mainly for warm starts.
    pub fn pack_fields(&self, u: &VectorField<S>, p: &VolumeField<S>) -> Vec<S> {
        let grid = self.pack.grid;
        let mut out = Vec::with_capacity(self.ndof());
        for c in 0..3 {
            out.extend_from_slice(&u.comps[c].data);
        }
        out.extend_from_slice(&nodes_to_cells(p, &grid));
        out
    }

    fn grad_p(&self, cells: &[S]) -> (VolumeField<S>, VectorField<S>) {
        let grid = self.pack.grid;
        let p_node = cells_to_nodes(cells, &grid);
        let dzp = cell_diff_to_nodes(cells, &grid);
        let raw = VectorField::from_comps(
            crate::operators::dx(&p_node, self.sp),
            crate::operators::dy(&p_node, self.sp),
            dzp,
        );
        (p_node, apply_amat(self.pack, &raw))
    }

    pub fn apply(&self, x: &[S], y: &mut [S]) {
        let grid = self.pack.grid;
        let nh = grid.nh();
        let nz = grid.nz;
        let n = grid.nvol();
        let u = VectorField::from_comps(
            wrap_scalar(&grid, x[0..n].to_vec()),
            wrap_scalar(&grid, x[n..2 * n].to_vec()),
            wrap_scalar(&grid, x[2 * n..3 * n].to_vec()),
        );
        let (p_node, gp) = self.grad_p(&x[3 * n..]);
        let laps: Vec<VolumeField<S>> = (0..3)
            .map(|c| lap_a_expanded(&u.comps[c], self.pack, self.sp))
            .collect();
        let divu = div_a_cells(&u, self.pack, self.sp);
        let stress_n = {
            let s = symgrad_a(&u, self.pack, self.sp);
            matrix_dot_normal_top(&s, self.pack)
        };
        let md = S::lit(self.mass_over_dt);
        let w = S::lit(self.diffusion_weight);
        for c in 0..3usize {
            for k in 0..=nz {
                for nn in 0..nh {
                    let idx = k * nh + nn;
                    y[c * n + idx] = if k == 0 {
                        u.comps[c].data[idx]
                    } else if k == nz {
                        // (S_A(p, u) N)_c = p N_c - (D_A u N)_c
                        p_node.data[idx] * self.pack.n.comps[c][nn] - stress_n[c][nn]
                    } else {
                        md * u.comps[c].data[idx] - w * laps[c].data[idx] + gp.comps[c].data[idx]
                    };
                }
            }
        }
        // divergence rows on the pressure cells
        y[3 * n..].copy_from_slice(&divu);
    }

    pub fn solve(
        &self,
        rhs: &[S],
        precond: &ModePrecond<S>,
        x0: Option<&[S]>,
        opts: &SolverOpts,
    ) -> Result<(Vec<S>, GmresStats)> {
        let ndof = self.ndof();
        let mut x = match x0 {
            Some(v) => v.to_vec(),
            None => vec![S::zero(); ndof],
        };
        let apply = |v: &[S], out: &mut [S]| self.apply(v, out);
        let mp = |v: &[S], out: &mut [S]| precond.apply(self.sp, v, out);
        let stats = gmres(ndof, &apply, &mp, rhs, &mut x, opts.gmres())?;
        Ok((x, stats))
    }

    /// Assembles the packed right-hand side; `f1` is the full momentum datum
    /// (buoyancy already folded in by the caller), `f2` the divergence datum,
    /// `f4` the stress boundary datum.
    pub fn rhs(&self, f1: &VectorField<S>, f2: &VolumeField<S>, f4: &SurfaceVector<S>) -> Vec<S> {
        let grid = self.pack.grid;
        let nh = grid.nh();
        let nz = grid.nz;
        let n = grid.nvol();
        let mut out = vec![S::zero(); self.ndof()];
        for c in 0..3usize {
            for k in 1..=nz {
                for nn in 0..nh {
                    let idx = k * nh + nn;
                    out[c * n + idx] = if k == nz {
                        f4.comps[c][nn]
                    } else {
                        f1.comps[c].data[idx]
                    };
                }
            }
        }
        let f2_cells = nodes_to_cells(f2, &grid);
        out[3 * n..].copy_from_slice(&f2_cells);
        out
    }
}

/// Data for the transformed Poisson problem.
pub struct PoissonData<S: Scalar> {
    /// Body datum.
    pub f1: VolumeField<S>,
    /// Top Dirichlet datum.
    pub f2: SurfaceField<S>,
    /// Bottom Neumann datum `grad_A p . nu` with `nu = -e3`.
    pub f3: SurfaceField<S>,
}

pub fn solve_a_poisson<S: Scalar>(
    pack: &GeometryPack<S>,
    sp: &SpectralGrid<S>,
    data: &PoissonData<S>,
    opts: &SolverOpts,
) -> Result<VolumeField<S>> {
    let grid = pack.grid;
    let system = ScalarSystem {
        pack,
        sp,
        kind: ScalarKind::Poisson,
    };
    let mut precond = scalar_precond(&grid, sp, ScalarKind::Poisson)?;
    precond.set_threads(opts.threads);
    let nh = grid.nh();
    let mut rhs = vec![S::zero(); grid.nvol()];
    for k in 0..=grid.nz {
        for n in 0..nh {
            let idx = k * nh + n;
            rhs[idx] = if k == grid.nz {
                data.f2.values[n]
            } else if k == 0 {
                data.f3.values[n]
            } else {
                data.f1.data[idx]
            };
        }
    }
    let (mut p, _) = system.solve(&rhs, &precond, None, opts)?;
    // make the Dirichlet trace literal
    p.level_mut(grid.nz).copy_from_slice(&data.f2.values);
    Ok(p)
}

/// Data for the Robin heat problem.
pub struct HeatData<S: Scalar> {
    pub f3: VolumeField<S>,
    pub f5: SurfaceField<S>,
}

pub fn solve_heat_robin<S: Scalar>(
    pack: &GeometryPack<S>,
    sp: &SpectralGrid<S>,
    data: &HeatData<S>,
    opts: &SolverOpts,
) -> Result<VolumeField<S>> {
    let grid = pack.grid;
    let kind = ScalarKind::Heat {
        mass_over_dt: 0.0,
        diffusion_weight: 1.0,
    };
    let system = ScalarSystem { pack, sp, kind };
    let mut precond = scalar_precond(&grid, sp, kind)?;
    precond.set_threads(opts.threads);
    let nh = grid.nh();
    let mut rhs = vec![S::zero(); grid.nvol()];
    for k in 1..=grid.nz {
        for n in 0..nh {
            let idx = k * nh + n;
            rhs[idx] = if k == grid.nz {
                data.f5.values[n]
            } else {
                data.f3.data[idx]
            };
        }
    }
    let (mut theta, _) = system.solve(&rhs, &precond, None, opts)?;
    for v in theta.level_mut(0) {
        *v = S::zero();
    }
    Ok(theta)
}

/// Data for the transformed Stokes problem.
pub struct StokesData<S: Scalar> {
    /// Momentum datum; for the standalone solve any buoyancy contribution is
    /// already folded in by the caller.
    pub f1: VectorField<S>,
    /// Divergence datum.
    pub f2: VolumeField<S>,
    /// Stress boundary datum on the top surface.
    pub f4: SurfaceVector<S>,
}

pub fn solve_a_stokes<S: Scalar>(
    pack: &GeometryPack<S>,
    sp: &SpectralGrid<S>,
    data: &StokesData<S>,
    opts: &SolverOpts,
) -> Result<(VectorField<S>, VolumeField<S>)> {
    let grid = pack.grid;
    let system = VelocitySystem {
        pack,
        sp,
        mass_over_dt: 0.0,
        diffusion_weight: 1.0,
    };
    let mut precond = velocity_precond(&grid, sp, 0.0, 1.0)?;
    precond.set_threads(opts.threads);
    let rhs = system.rhs(&data.f1, &data.f2, &data.f4);
    let (x, _) = system.solve(&rhs, &precond, None, opts)?;
    let (mut u, p) = system.unpack(&x);
    for c in 0..3 {
        for v in u.comps[c].level_mut(0) {
            *v = S::zero();
        }
    }
    Ok((u, p))
}

/// Data for the coupled stationary convection problem.
pub struct BenardData<S: Scalar> {
    pub f1: VectorField<S>,
    pub f2: VolumeField<S>,
    pub f3: VolumeField<S>,
    pub f4: SurfaceVector<S>,
    pub f5: SurfaceField<S>,
}

/// Temperature first, then Stokes with the buoyancy `theta e3` added to the
/// momentum datum.
pub fn solve_stationary_benard<S: Scalar>(
    pack: &GeometryPack<S>,
    sp: &SpectralGrid<S>,
    data: &BenardData<S>,
    opts: &SolverOpts,
) -> Result<(VectorField<S>, VolumeField<S>, VolumeField<S>)> {
    let theta = solve_heat_robin(
        pack,
        sp,
        &HeatData {
            f3: data.f3.clone(),
            f5: data.f5.clone(),
        },
        opts,
    )?;
    let mut f1 = data.f1.clone();
    f1.comps[2].axpy(S::one(), &theta);
    let (u, p) = solve_a_stokes(
        pack,
        sp,
        &StokesData {
            f1,
            f2: data.f2.clone(),
            f4: data.f4.clone(),
        },
        opts,
    )?;
    Ok((u, p, theta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::geometry_pack;

    fn setup(nz: usize) -> (Grid, SpectralGrid<f64>) {
        let grid = Grid::new(16, 16, nz, 1.0, 1.0).unwrap();
        let sp = SpectralGrid::new(&grid);
        (grid, sp)
    }

    #[test]
    fn cell_node_interpolation_is_quadratic_exact() {
        let (grid, _) = setup(12);
        let quad = |z: f64| 0.3 - 0.7 * z + 0.45 * z * z;
        let nh = grid.nh();
        let mut cells = vec![0.0f64; nh * grid.nz];
        for k in 0..grid.nz {
            let zc = grid.zcoord(k) + 0.5 * grid.hz();
            for n in 0..nh {
                cells[k * nh + n] = quad(zc);
            }
        }
        let nodes = cells_to_nodes(&cells, &grid);
        for k in 0..=grid.nz {
            let want = quad(grid.zcoord(k));
            for n in 0..nh {
                assert!(
                    (nodes.data[k * nh + n] - want).abs() < 1e-13,
                    "node {k}: {} vs {want}",
                    nodes.data[k * nh + n]
                );
            }
        }
        let dz = cell_diff_to_nodes(&cells, &grid);
        for k in 1..grid.nz {
            let want = -0.7 + 0.9 * grid.zcoord(k);
            for n in 0..nh {
                assert!((dz.data[k * nh + n] - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn poisson_zero_data_gives_zero() {
        let (grid, sp) = setup(8);
        let pack = GeometryPack::flat(&grid, &sp);
        let data = PoissonData {
            f1: VolumeField::zeros(&grid),
            f2: SurfaceField::zeros(&grid),
            f3: SurfaceField::zeros(&grid),
        };
        let p = solve_a_poisson(&pack, &sp, &data, &SolverOpts::default()).unwrap();
        assert_eq!(p.linf(), 0.0);
    }

    #[test]
    fn heat_conduction_equilibrium_is_exact() {
        // F3 = 0, F5 = -1 on flat geometry: theta = -(1 + z)/2
        let (grid, sp) = setup(24);
        let pack = GeometryPack::flat(&grid, &sp);
        let data = HeatData {
            f3: VolumeField::zeros(&grid),
            f5: SurfaceField::constant(&grid, -1.0),
        };
        let theta = solve_heat_robin(&pack, &sp, &data, &SolverOpts::default()).unwrap();
        let want = VolumeField::from_fn(&grid, |_, _, z| -(1.0 + z) / 2.0);
        assert!(
            theta.max_abs_diff(&want) < 1e-8,
            "conduction error {}",
            theta.max_abs_diff(&want)
        );
    }

    #[test]
    fn heat_zero_data_gives_zero() {
        let (grid, sp) = setup(8);
        let k = 2.0 * std::f64::consts::PI / grid.l1;
        let eta = SurfaceField::from_fn(&sp, &grid, |x, _| 0.1 * (k * x).cos());
        let pack = geometry_pack(&eta, None, &grid, 0.3, 0.1, &sp).unwrap();
        let data = HeatData {
            f3: VolumeField::zeros(&grid),
            f5: SurfaceField::zeros(&grid),
        };
        let theta = solve_heat_robin(&pack, &sp, &data, &SolverOpts::default()).unwrap();
        assert_eq!(theta.linf(), 0.0);
    }

    #[test]
    fn stokes_hydrostatic_balance_is_exact() {
        // flat, F1 = theta e3 with theta = -(1+z)/2: u = 0,
        // p = -(z + z^2/2)/2
        let (grid, sp) = setup(24);
        let pack = GeometryPack::flat(&grid, &sp);
        let theta = VolumeField::from_fn(&grid, |_, _, z| -(1.0 + z) / 2.0);
        let data = StokesData {
            f1: VectorField::from_comps(
                VolumeField::zeros(&grid),
                VolumeField::zeros(&grid),
                theta,
            ),
            f2: VolumeField::zeros(&grid),
            f4: SurfaceVector::zeros(grid.nh()),
        };
        let (u, p) = solve_a_stokes(&pack, &sp, &data, &SolverOpts::default()).unwrap();
        let want = VolumeField::from_fn(&grid, |_, _, z| -(z + z * z / 2.0) / 2.0);
        assert!(u.linf() < 1e-9, "velocity should vanish, got {}", u.linf());
        assert!(
            p.max_abs_diff(&want) < 1e-8,
            "hydrostatic error {}",
            p.max_abs_diff(&want)
        );
    }

    #[test]
    fn stokes_zero_data_gives_zero() {
        let (grid, sp) = setup(8);
        let pack = GeometryPack::flat(&grid, &sp);
        let data = StokesData {
            f1: VectorField::zeros(&grid),
            f2: VolumeField::zeros(&grid),
            f4: SurfaceVector::zeros(grid.nh()),
        };
        let (u, p) = solve_a_stokes(&pack, &sp, &data, &SolverOpts::default()).unwrap();
        assert_eq!(u.linf(), 0.0);
        assert_eq!(p.linf(), 0.0);
    }

    #[test]
    fn coupled_equilibrium_composes_the_hand_solutions() {
        let (grid, sp) = setup(24);
        let pack = GeometryPack::flat(&grid, &sp);
        let data = BenardData {
            f1: VectorField::zeros(&grid),
            f2: VolumeField::zeros(&grid),
            f3: VolumeField::zeros(&grid),
            f4: SurfaceVector::zeros(grid.nh()),
            f5: SurfaceField::constant(&grid, -1.0),
        };
        let (u, p, theta) =
            solve_stationary_benard(&pack, &sp, &data, &SolverOpts::default()).unwrap();
        let theta_want = VolumeField::from_fn(&grid, |_, _, z| -(1.0 + z) / 2.0);
        let p_want = VolumeField::from_fn(&grid, |_, _, z| -(z + z * z / 2.0) / 2.0);
        assert!(u.linf() < 1e-9);
        assert!(theta.max_abs_diff(&theta_want) < 1e-8);
        assert!(p.max_abs_diff(&p_want) < 1e-8);
    }

    #[test]
    fn heat_flat_maximum_principle_sanity() {
        // nonnegative data, flat geometry: solution stays nonnegative
        let (grid, sp) = setup(16);
        let pack = GeometryPack::flat(&grid, &sp);
        let k = 2.0 * std::f64::consts::PI / grid.l1;
        let data = HeatData {
            f3: VolumeField::from_fn(&grid, |x, _, z| (1.0 + (k * x).cos() * 0.5) * (1.0 + z)),
            f5: SurfaceField::from_fn(&sp, &grid, |x, _| 0.3 + 0.1 * (k * x).sin()),
        };
        let theta = solve_heat_robin(&pack, &sp, &data, &SolverOpts::default()).unwrap();
        let min = theta.data.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(min >= -1e-9, "min theta = {min}");
    }
}
