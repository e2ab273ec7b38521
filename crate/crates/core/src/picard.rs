//! The nonlinear fixed-point iteration: each sweep solves the linear moving-
//! geometry system on the previous sweep's surface with the previous sweep's
//! nonlinear forcings, then transports the surface with the new velocity.
//! Contraction is observed through discrete space-time norms of successive
//! sweep differences.

use crate::data_compat::{build_initial_data, BaseForcings, InitialDataInputs};
use crate::elliptic::SolverOpts;
use crate::error::{Error, Result};
use crate::evolution::{
    energy_ledger, EvolutionSolver, EvolutionState, StepForcings, TimeScheme, TrajectoryEntry,
};
use crate::fft::SpectralGrid;
use crate::field::{SurfaceField, VectorField, VolumeField};
use crate::geometry::{geometry_pack, surface_sobolev_norm, GeometryPack, SurfaceVector};
use crate::grid::Grid;
use crate::norms::{hk_sq, hk_sq_vec, time_l2, time_linf};
use crate::operators::{dz, grad_a, normal_velocity_top, vector_trace_top};
use crate::transport::SurfaceTrace;
use crate::Scalar;
use serde::Serialize;

/// Run parameters of the fixed-point iteration.
#[derive(Debug, Clone)]
pub struct PicardConfig {
    pub grid: Grid,
    pub t_final: f64,
    pub dt: f64,
    pub max_sweeps: usize,
    /// Sweeps run at least this many times before the stopping rule fires.
    pub min_sweeps: usize,
    pub tol_fixed_point: f64,
    /// Jacobian floor parameter; sweeps abort when min J < delta / 2.
    pub delta: f64,
    pub epsilon: f64,
    pub scheme: TimeScheme,
    pub solver: SolverOpts,
    pub threads: usize,
}

impl PicardConfig {
    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        if !(self.dt > 0.0 && self.dt < self.t_final && self.t_final <= 1.0) {
            return Err(Error::Config(format!(
                "need 0 < dt < T <= 1, got dt = {}, T = {}",
                self.dt, self.t_final
            )));
        }
        if self.tol_fixed_point <= 0.0 || self.solver.tol <= 0.0 {
            return Err(Error::Config("tolerances must be positive".into()));
        }
        if self.delta <= 0.0 || self.epsilon <= 0.0 {
            return Err(Error::Config("delta and epsilon must be positive".into()));
        }
        Ok(())
    }

    pub fn nsteps(&self) -> usize {
        (self.t_final / self.dt).round().max(1.0) as usize
    }

    pub fn jac_floor(&self) -> f64 {
        self.delta / 2.0
    }
}

/// Level-0 initial fields of a run.
#[derive(Debug, Clone)]
pub struct InitialState<S: Scalar> {
    pub u0: VectorField<S>,
    pub theta0: VolumeField<S>,
    pub eta0: SurfaceField<S>,
}

/// One stored time level of a sweep.
#[derive(Debug, Clone)]
pub struct SweepEntry<S: Scalar> {
    pub t: f64,
    pub eta: SurfaceField<S>,
    pub eta_t: SurfaceField<S>,
    pub u: VectorField<S>,
    pub p: VolumeField<S>,
    pub theta: VolumeField<S>,
}

#[derive(Debug, Clone)]
pub struct Sweep<S: Scalar> {
    pub entries: Vec<SweepEntry<S>>,
}

/// Quantities observed while producing a sweep.
#[derive(Debug, Clone, Copy, Default)]
pub struct SweepStats {
    pub min_j: f64,
    pub max_div_residual: f64,
}

/// Per-sweep record of the iteration diagnostics.
#[derive(Debug, Clone, Serialize)]
pub struct IterationRecord {
    pub sweep: usize,
    pub n_dist: f64,
    pub m_dist: f64,
    pub n_ratio: Option<f64>,
    pub max_div_residual: f64,
    pub min_j: f64,
    pub ledger_residual_u: f64,
    pub ledger_residual_theta: f64,
    pub k_n_u_theta: f64,
    pub k_eta: f64,
    pub mode: String,
}

/// Nonlinear forcing fields evaluated on one sweep state; the advection
/// products are dealiased.
pub fn nonlinear_forcings<S: Scalar>(
    u: &VectorField<S>,
    theta: &VolumeField<S>,
    pack: &GeometryPack<S>,
    sp: &SpectralGrid<S>,
) -> Result<StepForcings<S>> {
    let grid = pack.grid;
    let layer = pack.time_layer()?;
    let nh = grid.nh();
    // coefficient field dt(eta_bar) (1 + x3) K
    let mut coeff = VolumeField::zeros(&grid);
    for k in 0..=grid.nz {
        let w = S::lit(1.0 + grid.zcoord(k));
        for n in 0..nh {
            let idx = k * nh + n;
            coeff.data[idx] = layer.eta_bar_t.data[idx] * w * pack.k.data[idx];
        }
    }
    let mut f1 = VectorField::zeros(&grid);
    let grads: Vec<_> = (0..3).map(|c| grad_a(&u.comps[c], pack, sp)).collect();
    for c in 0..3 {
        let dzu = dz(&u.comps[c]);
        let mut acc = VolumeField::zeros(&grid);
        // dt(eta_bar)(1+x3) K d3 u_c
        for k in 0..=grid.nz {
            let lift = sp.dealiased_mul_level(coeff.level(k), dzu.level(k));
            acc.level_mut(k).copy_from_slice(&lift);
        }
        // - u . grad_A u_c
        for j in 0..3 {
            for k in 0..=grid.nz {
                let prod = sp.dealiased_mul_level(u.comps[j].level(k), grads[c].comps[j].level(k));
                let slot = acc.level_mut(k);
                for (s, p) in slot.iter_mut().zip(prod.iter()) {
                    *s -= *p;
                }
            }
        }
        f1.comps[c] = acc;
    }
    let mut f3 = VolumeField::zeros(&grid);
    {
        let dzt = dz(theta);
        let gt = grad_a(theta, pack, sp);
        for k in 0..=grid.nz {
            let lift = sp.dealiased_mul_level(coeff.level(k), dzt.level(k));
            f3.level_mut(k).copy_from_slice(&lift);
        }
        for j in 0..3 {
            for k in 0..=grid.nz {
                let prod = sp.dealiased_mul_level(u.comps[j].level(k), gt.comps[j].level(k));
                let slot = f3.level_mut(k);
                for (s, p) in slot.iter_mut().zip(prod.iter()) {
                    *s -= *p;
                }
            }
        }
    }
    // F4 = eta N (per-component dealiased surface product), F5 = -|N|
    let mut f4 = SurfaceVector::zeros(nh);
    for c in 0..2 {
        let prod = sp.dealiased_mul_level(&pack.eta.values, &pack.n.comps[c]);
        f4.comps[c].copy_from_slice(&prod);
    }
    f4.comps[2].copy_from_slice(&pack.eta.values);
    let f5 = SurfaceField::from_values(sp, pack.nmag.iter().map(|v| -*v).collect())?;
    Ok(StepForcings { f1, f3, f4, f5 })
}

/// The constant-in-time extension of the initial data used as sweep zero.
pub fn sweep_zero<S: Scalar>(
    init: &InitialState<S>,
    p0: &VolumeField<S>,
    cfg: &PicardConfig,
) -> Sweep<S> {
    let nsteps = cfg.nsteps();
    let entries = (0..=nsteps)
        .map(|k| SweepEntry {
            t: k as f64 * cfg.dt,
            eta: init.eta0.clone(),
            eta_t: SurfaceField {
                nx: init.eta0.nx,
                ny: init.eta0.ny,
                values: vec![S::zero(); init.eta0.values.len()],
                coeffs: vec![
                    num_complex::Complex::new(S::zero(), S::zero());
                    init.eta0.coeffs.len()
                ],
            },
            u: init.u0.clone(),
            p: p0.clone(),
            theta: init.theta0.clone(),
        })
        .collect();
    Sweep { entries }
}

/// Runs one sweep of the iteration on the previous sweep's geometry and
/// forcings, then transports the surface with the new velocity traces.
pub fn picard_sweep<S: Scalar>(
    prev: &Sweep<S>,
    init: &InitialState<S>,
    p_init: &VolumeField<S>,
    cfg: &PicardConfig,
    solver: &EvolutionSolver<S>,
    sp: &SpectralGrid<S>,
) -> Result<(Sweep<S>, SweepStats)> {
    let grid = cfg.grid;
    let nsteps = cfg.nsteps();
    if prev.entries.len() != nsteps + 1 {
        return Err(Error::Mismatch(format!(
            "previous sweep has {} entries, expected {}",
            prev.entries.len(),
            nsteps + 1
        )));
    }
    let mut stats = SweepStats {
        min_j: f64::INFINITY,
        max_div_residual: 0.0,
    };
    // geometry packs on the previous sweep's surface
    let mut packs = Vec::with_capacity(nsteps + 1);
    for entry in &prev.entries {
        let pack = geometry_pack(
            &entry.eta,
            Some(&entry.eta_t),
            &grid,
            cfg.epsilon,
            cfg.jac_floor(),
            sp,
        )?;
        stats.min_j = stats.min_j.min(pack.min_j);
        packs.push(pack);
    }
    // linear evolution driven by the previous sweep's nonlinear forcings
    let mut states = Vec::with_capacity(nsteps + 1);
    states.push(EvolutionState::initial(
        init.u0.clone(),
        p_init.clone(),
        init.theta0.clone(),
        &grid,
    ));
    for k in 0..nsteps {
        let prev_entry = &prev.entries[k + 1];
        let forcings = nonlinear_forcings(&prev_entry.u, &prev_entry.theta, &packs[k + 1], sp)?;
        let next = solver.step(states.last().unwrap(), &packs[k], &packs[k + 1], &forcings)?;
        stats.max_div_residual = stats
            .max_div_residual
            .max(solver.divergence_residual(&next.u, &packs[k + 1]));
        states.push(next);
    }
    // surface transport with the new velocity traces through the new normals
    let mut etas: Vec<SurfaceField<S>> = Vec::with_capacity(nsteps + 1);
    let mut eta_ts: Vec<SurfaceField<S>> = Vec::with_capacity(nsteps + 1);
    etas.push(init.eta0.clone());
    for k in 0..=nsteps {
        // dt(eta) = u . N with N from the transported surface
        let pack_now = geometry_pack(&etas[k], None, &grid, cfg.epsilon, cfg.jac_floor(), sp)?;
        stats.min_j = stats.min_j.min(pack_now.min_j);
        let eta_t = SurfaceField::from_values(sp, normal_velocity_top(&states[k].u, &pack_now))?;
        eta_ts.push(eta_t);
        if k < nsteps {
            let tr_now = trace_of(&states[k].u);
            let tr_next = trace_of(&states[k + 1].u);
            let mid = SurfaceTrace::lerp(&tr_now, &tr_next, 0.5);
            let next_eta =
                crate::transport::advect_surface_step(&etas[k], &tr_now, &mid, cfg.dt, &grid, sp)?;
            etas.push(next_eta);
        }
    }
    let entries = (0..=nsteps)
        .map(|k| SweepEntry {
            t: k as f64 * cfg.dt,
            eta: etas[k].clone(),
            eta_t: eta_ts[k].clone(),
            u: states[k].u.clone(),
            p: states[k].p.clone(),
            theta: states[k].theta.clone(),
        })
        .collect();
    Ok((Sweep { entries }, stats))
}

fn trace_of<S: Scalar>(u: &VectorField<S>) -> SurfaceTrace<S> {
    let [u1, u2, u3] = vector_trace_top(u);
    SurfaceTrace { u1, u2, u3 }
}

/// Discrete contraction norms of the difference of two sweeps:
/// the space-time velocity/pressure/temperature norm and the surface norm.
pub fn contraction_metrics<S: Scalar>(
    a: &Sweep<S>,
    b: &Sweep<S>,
    grid: &Grid,
    dt: f64,
    sp: &SpectralGrid<S>,
) -> Result<(f64, f64)> {
    if a.entries.len() != b.entries.len() || a.entries.len() < 3 {
        return Err(Error::Mismatch(
            "sweeps must share times and hold at least three states".into(),
        ));
    }
    let n = a.entries.len();
    let du: Vec<VectorField<S>> = (0..n)
        .map(|k| a.entries[k].u.sub(&b.entries[k].u))
        .collect();
    let dp: Vec<VolumeField<S>> = (0..n)
        .map(|k| a.entries[k].p.sub(&b.entries[k].p))
        .collect();
    let dth: Vec<VolumeField<S>> = (0..n)
        .map(|k| a.entries[k].theta.sub(&b.entries[k].theta))
        .collect();
    let deta: Vec<SurfaceField<S>> = (0..n)
        .map(|k| a.entries[k].eta.sub(&b.entries[k].eta))
        .collect();

    let ddt_u = series_derivative_vec(&du, dt);
    let ddt_th = series_derivative_vol(&dth, dt);
    let ddt_eta = series_derivative_surf(&deta, dt);
    let ddtt_eta = series_derivative_surf(&ddt_eta, dt);

    let vol_series = |fields: &[VolumeField<S>], k: usize| -> Vec<f64> {
        fields.iter().map(|f| hk_sq(f, k, grid, sp)).collect()
    };
    let vec_series = |fields: &[VectorField<S>], k: usize| -> Vec<f64> {
        fields.iter().map(|f| hk_sq_vec(f, k, grid, sp)).collect()
    };
    let surf_series = |fields: &[SurfaceField<S>], s: f64| -> Vec<f64> {
        fields
            .iter()
            .map(|f| surface_sobolev_norm(f, s, sp).powi(2))
            .collect()
    };

    let n_dist = time_linf(&vec_series(&du, 2))
        + time_l2(&vec_series(&du, 3), dt)
        + time_linf(&vec_series(&ddt_u, 0))
        + time_l2(&vec_series(&ddt_u, 1), dt)
        + time_linf(&vol_series(&dp, 1))
        + time_l2(&vol_series(&dp, 2), dt)
        + time_linf(&vol_series(&dth, 2))
        + time_l2(&vol_series(&dth, 3), dt)
        + time_linf(&vol_series(&ddt_th, 0))
        + time_l2(&vol_series(&ddt_th, 1), dt);
    let m_dist = time_linf(&surf_series(&deta, 2.5))
        + time_linf(&surf_series(&ddt_eta, 1.5))
        + time_l2(&surf_series(&ddtt_eta, 0.5), dt);
    Ok((n_dist, m_dist))
}

fn series_derivative_vol<S: Scalar>(f: &[VolumeField<S>], dt: f64) -> Vec<VolumeField<S>> {
    let n = f.len();
    (0..n)
        .map(|k| {
            if k == 0 {
                deriv3(&f[0], &f[1], &f[2], dt, true)
            } else if k == n - 1 {
                deriv3(&f[n - 1], &f[n - 2], &f[n - 3], dt, false)
            } else {
                f[k + 1].sub(&f[k - 1]).scaled(S::lit(0.5 / dt))
            }
        })
        .collect()
}

fn deriv3<S: Scalar>(
    a: &VolumeField<S>,
    b: &VolumeField<S>,
    c: &VolumeField<S>,
    dt: f64,
    forward: bool,
) -> VolumeField<S> {
    let sgn = if forward { 1.0 } else { -1.0 };
    let mut out = a.scaled(S::lit(-1.5 * sgn / dt));
    out.axpy(S::lit(2.0 * sgn / dt), b);
    out.axpy(S::lit(-0.5 * sgn / dt), c);
    out
}

fn series_derivative_vec<S: Scalar>(f: &[VectorField<S>], dt: f64) -> Vec<VectorField<S>> {
    let comps: Vec<Vec<VolumeField<S>>> = (0..3)
        .map(|c| {
            let series: Vec<VolumeField<S>> = f.iter().map(|v| v.comps[c].clone()).collect();
            series_derivative_vol(&series, dt)
        })
        .collect();
    (0..f.len())
        .map(|k| {
            VectorField::from_comps(
                comps[0][k].clone(),
                comps[1][k].clone(),
                comps[2][k].clone(),
            )
        })
        .collect()
}

fn series_derivative_surf<S: Scalar>(f: &[SurfaceField<S>], dt: f64) -> Vec<SurfaceField<S>> {
    let n = f.len();
    (0..n)
        .map(|k| {
            let (i0, c0, i1, c1, i2, c2) = if k == 0 {
                (0, -1.5, 1, 2.0, 2, -0.5)
            } else if k == n - 1 {
                (n - 1, 1.5, n - 2, -2.0, n - 3, 0.5)
            } else {
                (k + 1, 0.5, k, 0.0, k - 1, -0.5)
            };
            let mut out = f[i0].scaled(S::lit(c0 / dt));
            out.axpy(S::lit(c1 / dt), &f[i1]);
            out.axpy(S::lit(c2 / dt), &f[i2]);
            out
        })
        .collect()
}

/// Norm aggregate over a sweep: the space-time norms of the velocity and
/// temperature through two time-derivative levels (diagnostic surrogate).
pub fn aggregate_k_n<S: Scalar>(
    sweep: &Sweep<S>,
    grid: &Grid,
    dt: f64,
    sp: &SpectralGrid<S>,
) -> f64 {
    let n_levels = 2usize;
    let u: Vec<VectorField<S>> = sweep.entries.iter().map(|e| e.u.clone()).collect();
    let th: Vec<VolumeField<S>> = sweep.entries.iter().map(|e| e.theta.clone()).collect();
    let mut acc = 0.0;
    let mut us = u;
    let mut ths = th;
    for j in 0..=n_levels {
        let k_hi = 2 * n_levels - 2 * j + 1;
        let k_lo = 2 * n_levels - 2 * j;
        let useries_hi: Vec<f64> = us.iter().map(|f| hk_sq_vec(f, k_hi, grid, sp)).collect();
        let useries_lo: Vec<f64> = us.iter().map(|f| hk_sq_vec(f, k_lo, grid, sp)).collect();
        let tseries_hi: Vec<f64> = ths.iter().map(|f| hk_sq(f, k_hi, grid, sp)).collect();
        let tseries_lo: Vec<f64> = ths.iter().map(|f| hk_sq(f, k_lo, grid, sp)).collect();
        acc += time_l2(&useries_hi, dt)
            + time_linf(&useries_lo)
            + time_l2(&tseries_hi, dt)
            + time_linf(&tseries_lo);
        if j < n_levels {
            us = series_derivative_vec(&us, dt);
            ths = series_derivative_vol(&ths, dt);
        }
    }
    acc
}

/// Surface norm aggregate over a sweep (diagnostic surrogate).
pub fn aggregate_k_eta<S: Scalar>(sweep: &Sweep<S>, dt: f64, sp: &SpectralGrid<S>) -> f64 {
    let n_levels = 2usize;
    let etas: Vec<SurfaceField<S>> = sweep.entries.iter().map(|e| e.eta.clone()).collect();
    // sup-in-time part
    let mut acc = 0.0;
    let mut series = etas;
    for j in 0..=n_levels {
        let s = (2 * n_levels) as f64 - 2.0 * j as f64 + 0.5;
        let vals: Vec<f64> = series
            .iter()
            .map(|f| surface_sobolev_norm(f, s.min(6.0), sp).powi(2))
            .collect();
        acc += time_linf(&vals);
        series = series_derivative_surf(&series, dt);
    }
    // dissipation part: levels 2 and 3 in L2
    let mut series = sweep
        .entries
        .iter()
        .map(|e| e.eta.clone())
        .collect::<Vec<_>>();
    for _ in 0..2 {
        series = series_derivative_surf(&series, dt);
    }
    for j in 2..=(n_levels + 1) {
        let s = (2 * n_levels) as f64 - 2.0 * j as f64 + 2.5;
        let vals: Vec<f64> = series
            .iter()
            .map(|f| surface_sobolev_norm(f, s.max(-2.0), sp).powi(2))
            .collect();
        acc += time_l2(&vals, dt);
        if j <= n_levels {
            series = series_derivative_surf(&series, dt);
        }
    }
    acc
}

/// Full iteration run.
pub struct PicardRun<S: Scalar> {
    pub records: Vec<IterationRecord>,
    pub final_sweep: Sweep<S>,
    pub converged: bool,
}

/// Initial pressure for the run via the initial-data construction.
pub fn initial_pressure<S: Scalar>(
    init: &InitialState<S>,
    cfg: &PicardConfig,
    sp: &SpectralGrid<S>,
) -> Result<VolumeField<S>> {
    let grid = cfg.grid;
    let pack_static = geometry_pack(&init.eta0, None, &grid, cfg.epsilon, cfg.jac_floor(), sp)?;
    let eta1 = SurfaceField::from_values(sp, normal_velocity_top(&init.u0, &pack_static))?;
    let pack = geometry_pack(
        &init.eta0,
        Some(&eta1),
        &grid,
        cfg.epsilon,
        cfg.jac_floor(),
        sp,
    )?;
    let base = nonlinear_forcings(&init.u0, &init.theta0, &pack, sp)?;
    let data = build_initial_data(
        &InitialDataInputs {
            u0: &init.u0,
            theta0: &init.theta0,
            eta0: &init.eta0,
            base: &BaseForcings {
                f1: base.f1.clone(),
                f3: base.f3.clone(),
                f4: base.f4.clone(),
                f5: base.f5.clone(),
            },
            base_rate: &BaseForcings::zeros(&grid),
            n_levels: 1,
            epsilon: cfg.epsilon,
            jac_floor: cfg.jac_floor(),
            buoyant_bottom_flux: false,
        },
        &grid,
        sp,
        &cfg.solver,
    )?;
    Ok(data.p[0].clone())
}

pub fn run_picard<S: Scalar>(
    cfg: &PicardConfig,
    init: &InitialState<S>,
    sp: &SpectralGrid<S>,
) -> Result<PicardRun<S>> {
    cfg.validate()?;
    let grid = cfg.grid;
    let solver = EvolutionSolver::new(grid, sp, cfg.dt, cfg.scheme, cfg.solver)?;
    let p0 = initial_pressure(init, cfg, sp)?;
    let mut prev = sweep_zero(init, &p0, cfg);
    let mut records = Vec::new();
    let mut converged = false;
    let mut last_dist: Option<f64> = None;
    for sweep_idx in 1..=cfg.max_sweeps {
        let (sweep, stats) = picard_sweep(&prev, init, &p0, cfg, &solver, sp)?;
        if stats.min_j < cfg.jac_floor() {
            return Err(Error::GeometryDegenerate {
                min_j: stats.min_j,
                floor: cfg.jac_floor(),
            });
        }
        let (n_dist, m_dist) = contraction_metrics(&sweep, &prev, &grid, cfg.dt, sp)?;
        let ledger = sweep_ledger(&sweep, cfg, sp)?;
        let record = IterationRecord {
            sweep: sweep_idx,
            n_dist,
            m_dist,
            n_ratio: last_dist.map(|d| if d > 0.0 { n_dist / d } else { 0.0 }),
            max_div_residual: stats.max_div_residual,
            min_j: stats.min_j,
            ledger_residual_u: ledger.residual_u,
            ledger_residual_theta: ledger.residual_theta,
            k_n_u_theta: aggregate_k_n(&sweep, &grid, cfg.dt, sp),
            k_eta: aggregate_k_eta(&sweep, cfg.dt, sp),
            mode: if cfg.threads <= 1 {
                "single-thread".to_string()
            } else {
                format!("threads-{}", cfg.threads)
            },
        };
        records.push(record);
        last_dist = Some(n_dist);
        prev = sweep;
        if n_dist < cfg.tol_fixed_point && sweep_idx >= cfg.min_sweeps {
            converged = true;
            break;
        }
    }
    Ok(PicardRun {
        records,
        final_sweep: prev,
        converged,
    })
}

/// Energy ledger of one sweep, rebuilding packs and forcings from the stored
/// surface series.
pub fn sweep_ledger<S: Scalar>(
    sweep: &Sweep<S>,
    cfg: &PicardConfig,
    sp: &SpectralGrid<S>,
) -> Result<crate::evolution::LedgerReport> {
    let grid = cfg.grid;
    let mut trajectory = Vec::with_capacity(sweep.entries.len());
    for entry in &sweep.entries {
        let pack = geometry_pack(
            &entry.eta,
            Some(&entry.eta_t),
            &grid,
            cfg.epsilon,
            cfg.jac_floor(),
            sp,
        )?;
        let forcings = nonlinear_forcings(&entry.u, &entry.theta, &pack, sp)?;
        trajectory.push(TrajectoryEntry {
            state: EvolutionState::initial(
                entry.u.clone(),
                entry.p.clone(),
                entry.theta.clone(),
                &grid,
            ),
            pack,
            forcings,
        });
    }
    // restore the stored times (initial() resets them)
    for (entry, traj) in sweep.entries.iter().zip(trajectory.iter_mut()) {
        traj.state.t = entry.t;
    }
    energy_ledger(&trajectory, sp)
}

/// Named initial-data presets.
pub fn preset_initial_state<S: Scalar>(
    name: &str,
    grid: &Grid,
    _sp: &SpectralGrid<S>,
    amplitude: f64,
) -> Result<InitialState<S>> {
    match name {
        "zero" => Ok(InitialState {
            u0: VectorField::zeros(grid),
            theta0: VolumeField::zeros(grid),
            eta0: SurfaceField::zeros(grid),
        }),
        "equilibrium" => Ok(InitialState {
            u0: VectorField::zeros(grid),
            theta0: VolumeField::from_fn(grid, |_, _, z| -(1.0 + z) / 2.0),
            eta0: SurfaceField::zeros(grid),
        }),
        "perturbed-equilibrium" => {
            let k = 2.0 * std::f64::consts::PI / grid.l1;
            Ok(InitialState {
                u0: VectorField::zeros(grid),
                theta0: VolumeField::from_fn(grid, move |x, _, z| {
                    -(1.0 + z) / 2.0
                        + amplitude
                            * (k * x).cos()
                            * (std::f64::consts::FRAC_PI_2 * (1.0 + z)).sin()
                }),
                eta0: SurfaceField::zeros(grid),
            })
        }
        other => Err(Error::Config(format!("unknown preset '{other}'"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(grid: Grid) -> PicardConfig {
        PicardConfig {
            grid,
            t_final: 0.02,
            dt: 5e-3,
            max_sweeps: 3,
            min_sweeps: 1,
            tol_fixed_point: 1e-12,
            delta: 0.5,
            epsilon: 1.0,
            scheme: TimeScheme::BackwardEuler,
            solver: SolverOpts::default(),
            threads: 1,
        }
    }

    #[test]
    fn nonlinear_forcings_hand_cases() {
        let grid = Grid::new(16, 16, 8, 1.0, 1.0).unwrap();
        let sp = SpectralGrid::<f64>::new(&grid);
        let pack = GeometryPack::flat_static(&grid, &sp);
        // all-zero fields: only F5 = -1 survives
        let f = nonlinear_forcings(
            &VectorField::zeros(&grid),
            &VolumeField::zeros(&grid),
            &pack,
            &sp,
        )
        .unwrap();
        assert_eq!(f.f1.linf(), 0.0);
        assert_eq!(f.f3.linf(), 0.0);
        assert_eq!(f.f4.linf(), 0.0);
        for &v in &f.f5.values {
            assert!((v + 1.0).abs() < 1e-14);
        }
        // uniform horizontal velocity advects theta: F3 = -c d1 theta
        let c = 0.7;
        let k = 2.0 * std::f64::consts::PI / grid.l1;
        let u = VectorField::from_comps(
            VolumeField::constant(&grid, c),
            VolumeField::zeros(&grid),
            VolumeField::zeros(&grid),
        );
        let theta = VolumeField::from_fn(&grid, |x, _, _| 0.1 * (k * x).cos());
        let f = nonlinear_forcings(&u, &theta, &pack, &sp).unwrap();
        assert_eq!(f.f1.linf(), 0.0, "uniform advection of uniform velocity");
        let want = VolumeField::from_fn(&grid, |x, _, _| c * 0.1 * k * (k * x).sin());
        assert!(f.f3.max_abs_diff(&want) < 1e-10);
    }

    #[test]
    fn equilibrium_forcings() {
        let grid = Grid::new(16, 16, 12, 1.0, 1.0).unwrap();
        let sp = SpectralGrid::<f64>::new(&grid);
        let pack = GeometryPack::flat_static(&grid, &sp);
        let theta = VolumeField::from_fn(&grid, |_, _, z| -(1.0 + z) / 2.0);
        let f = nonlinear_forcings(&VectorField::zeros(&grid), &theta, &pack, &sp).unwrap();
        assert_eq!(f.f1.linf(), 0.0);
        assert_eq!(f.f3.linf(), 0.0);
        assert_eq!(f.f4.linf(), 0.0);
        for &v in &f.f5.values {
            assert!((v + 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn contraction_metric_properties() {
        let grid = Grid::new(16, 16, 8, 1.0, 1.0).unwrap();
        let sp = SpectralGrid::<f64>::new(&grid);
        let cfg = config(grid);
        let init = preset_initial_state("equilibrium", &grid, &sp, 0.0).unwrap();
        let p0 = VolumeField::from_fn(&grid, |_, _, z| -(z + z * z / 2.0) / 2.0);
        let sweep = sweep_zero(&init, &p0, &cfg);
        // identical sweeps: zero distance
        let (n0, m0) = contraction_metrics(&sweep, &sweep, &grid, cfg.dt, &sp).unwrap();
        assert_eq!(n0, 0.0);
        assert_eq!(m0, 0.0);
        // quadratic homogeneity of the distance in the difference
        let mut scaled = sweep.clone();
        let k = 2.0 * std::f64::consts::PI / grid.l1;
        for (i, entry) in scaled.entries.iter_mut().enumerate() {
            let bump = VolumeField::from_fn(&grid, |x, _, z| {
                1e-3 * (i as f64 + 1.0) * (k * x).cos() * (1.0 + z)
            });
            entry.theta.axpy(1.0, &bump);
        }
        let (n1, _) = contraction_metrics(&scaled, &sweep, &grid, cfg.dt, &sp).unwrap();
        let mut scaled2 = sweep.clone();
        for (i, entry) in scaled2.entries.iter_mut().enumerate() {
            let bump = VolumeField::from_fn(&grid, |x, _, z| {
                2e-3 * (i as f64 + 1.0) * (k * x).cos() * (1.0 + z)
            });
            entry.theta.axpy(1.0, &bump);
        }
        let (n2, _) = contraction_metrics(&scaled2, &sweep, &grid, cfg.dt, &sp).unwrap();
        assert!(
            (n2 / n1 - 4.0).abs() < 1e-8,
            "quadratic scaling: {}",
            n2 / n1
        );
        // symmetry
        let (nf, _) = contraction_metrics(&sweep, &scaled, &grid, cfg.dt, &sp).unwrap();
        assert!((nf - n1).abs() < 1e-12 * n1.max(1.0));
    }

    #[test]
    fn surface_metric_single_mode_hand_value() {
        let grid = Grid::new(16, 16, 8, 1.0, 1.0).unwrap();
        let sp = SpectralGrid::<f64>::new(&grid);
        let cfg = config(grid);
        let init = preset_initial_state("equilibrium", &grid, &sp, 0.0).unwrap();
        let p0 = VolumeField::zeros(&grid);
        let sweep_a = sweep_zero(&init, &p0, &cfg);
        let mut sweep_b = sweep_a.clone();
        let a = 0.01;
        let k = 2.0 * std::f64::consts::PI / grid.l1;
        for entry in sweep_b.entries.iter_mut() {
            entry.eta = SurfaceField::from_fn(&sp, &grid, |x, _| a * (k * x).cos());
        }
        let (_, m) = contraction_metrics(&sweep_a, &sweep_b, &grid, cfg.dt, &sp).unwrap();
        let want = a * a * (1.0 + 4.0 * std::f64::consts::PI.powi(2)).powf(2.5) / 2.0;
        assert!((m - want).abs() < 1e-8 * want, "{m} vs {want}");
    }

    #[test]
    fn equilibrium_preset_is_a_picard_fixed_point() {
        let grid = Grid::new(16, 16, 16, 1.0, 1.0).unwrap();
        let sp = SpectralGrid::<f64>::new(&grid);
        let mut cfg = config(grid);
        cfg.max_sweeps = 3;
        let init = preset_initial_state("equilibrium", &grid, &sp, 0.0).unwrap();
        let run = run_picard(&cfg, &init, &sp).unwrap();
        for rec in &run.records {
            assert!(
                rec.n_dist < 1e-8,
                "sweep {} moved by {}",
                rec.sweep,
                rec.n_dist
            );
            assert!(rec.min_j >= cfg.jac_floor());
        }
    }
}

#[cfg(test)]
mod smoke_tests {
    use super::*;

    #[test]
    fn zero_data_with_active_robin_forcing_moves_off_sweep_zero() {
        let grid = Grid::new(16, 16, 8, 1.0, 1.0).unwrap();
        let sp = SpectralGrid::<f64>::new(&grid);
        let cfg = PicardConfig {
            grid,
            t_final: 0.01,
            dt: 5e-3,
            max_sweeps: 2,
            min_sweeps: 1,
            tol_fixed_point: 1e-30,
            delta: 0.5,
            epsilon: 1.0,
            scheme: crate::evolution::TimeScheme::BackwardEuler,
            solver: SolverOpts::default(),
            threads: 1,
        };
        let init = preset_initial_state::<f64>("zero", &grid, &sp, 0.0).unwrap();
        let run = run_picard(&cfg, &init, &sp).unwrap();
        // the Robin datum F5 = -|N| drives theta off zero in sweep 1
        assert!(run.records[0].n_dist > 0.0);
        assert!(run.records[0].n_dist.is_finite());
        assert!(run.records[0].m_dist.is_finite());
    }
}

#[cfg(test)]
mod thread_tests {
    use super::*;

    #[test]
    fn parallel_mode_is_bit_identical_to_single_thread() {
        let grid = Grid::new(16, 16, 8, 1.0, 1.0).unwrap();
        let sp = SpectralGrid::<f64>::new(&grid);
        let mut cfg = PicardConfig {
            grid,
            t_final: 0.01,
            dt: 5e-3,
            max_sweeps: 2,
            min_sweeps: 2,
            tol_fixed_point: 1e-30,
            delta: 0.5,
            epsilon: 1.0,
            scheme: crate::evolution::TimeScheme::BackwardEuler,
            solver: SolverOpts::default(),
            threads: 1,
        };
        let init = preset_initial_state::<f64>("perturbed-equilibrium", &grid, &sp, 0.01).unwrap();
        let run1 = run_picard(&cfg, &init, &sp).unwrap();
        cfg.threads = 4;
        cfg.solver.threads = 4;
        let run4 = run_picard(&cfg, &init, &sp).unwrap();
        for (a, b) in run1
            .final_sweep
            .entries
            .iter()
            .zip(run4.final_sweep.entries.iter())
        {
            assert!(a.theta.max_abs_diff(&b.theta) == 0.0);
            assert!(a.u.max_abs_diff(&b.u) == 0.0);
            assert!(a.p.max_abs_diff(&b.p) == 0.0);
        }
        // records match except for the mode tag
        for (r1, r4) in run1.records.iter().zip(run4.records.iter()) {
            assert_eq!(r1.n_dist, r4.n_dist);
            assert_eq!(r1.m_dist, r4.m_dist);
            assert_eq!(r4.mode, "threads-4");
        }
    }
}
