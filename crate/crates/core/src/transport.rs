//! Kinematic free-surface transport on the top boundary:
//! `dt(eta) + u1 d1(eta) + u2 d2(eta) = u3`, which is the same expression as
//! `dt(eta) = u . N` with the non-unit upward normal.

use crate::error::{Error, Result};
use crate::fft::SpectralGrid;
use crate::field::SurfaceField;
use crate::geometry::surface_sobolev_norm;
use crate::grid::Grid;
use crate::Scalar;

/// Velocity trace at the top plane.
#[derive(Debug, Clone)]
pub struct SurfaceTrace<S: Scalar> {
    pub u1: Vec<S>,
    pub u2: Vec<S>,
    pub u3: Vec<S>,
}

impl<S: Scalar> SurfaceTrace<S> {
    pub fn zeros(grid: &Grid) -> Self {
        SurfaceTrace {
            u1: vec![S::zero(); grid.nh()],
            u2: vec![S::zero(); grid.nh()],
            u3: vec![S::zero(); grid.nh()],
        }
    }

    pub fn lerp(a: &SurfaceTrace<S>, b: &SurfaceTrace<S>, w: f64) -> SurfaceTrace<S> {
        let wa = S::lit(1.0 - w);
        let wb = S::lit(w);
        let mix = |x: &[S], y: &[S]| -> Vec<S> {
            x.iter()
                .zip(y)
                .map(|(&xa, &xb)| wa * xa + wb * xb)
                .collect()
        };
        SurfaceTrace {
            u1: mix(&a.u1, &b.u1),
            u2: mix(&a.u2, &b.u2),
            u3: mix(&a.u3, &b.u3),
        }
    }

    fn max_abs(v: &[S]) -> f64 {
        v.iter().fold(0.0f64, |m, x| m.max(x.abs().to_f64_lossy()))
    }
}

/// Right-hand side `u . N = u3 - u1 d1(eta) - u2 d2(eta)` with the advection
/// products dealiased; used by both forms of the equation.
pub fn transport_rhs<S: Scalar>(
    eta: &SurfaceField<S>,
    trace: &SurfaceTrace<S>,
    sp: &SpectralGrid<S>,
) -> SurfaceField<S> {
    let ex = eta.spectral_dx(sp);
    let ey = eta.spectral_dy(sp);
    let adv1 = sp.dealiased_mul_level(&trace.u1, &ex.values);
    let adv2 = sp.dealiased_mul_level(&trace.u2, &ey.values);
    let vals: Vec<S> = (0..eta.values.len())
        .map(|n| trace.u3[n] - adv1[n] - adv2[n])
        .collect();
    SurfaceField::from_values(sp, vals).expect("transport right-hand side stayed finite")
}

fn cfl_limit<S: Scalar>(trace: &SurfaceTrace<S>, grid: &Grid) -> f64 {
    let dx = grid.l1 / grid.nx as f64;
    let dy = grid.l2 / grid.ny as f64;
    let m1 = SurfaceTrace::max_abs(&trace.u1);
    let m2 = SurfaceTrace::max_abs(&trace.u2);
    let lim1 = if m1 > 0.0 {
        0.5 * dx / m1
    } else {
        f64::INFINITY
    };
    let lim2 = if m2 > 0.0 {
        0.5 * dy / m2
    } else {
        f64::INFINITY
    };
    lim1.min(lim2)
}

/// One explicit midpoint (RK2) step of the surface equation. `trace_now` is
/// the trace at the step start, `trace_mid` at the half step.
pub fn advect_surface_step<S: Scalar>(
    eta: &SurfaceField<S>,
    trace_now: &SurfaceTrace<S>,
    trace_mid: &SurfaceTrace<S>,
    dt: f64,
    grid: &Grid,
    sp: &SpectralGrid<S>,
) -> Result<SurfaceField<S>> {
    let limit = cfl_limit(trace_now, grid);
    if dt > limit {
        return Err(Error::StepRejected {
            dt,
            suggested: 0.9 * limit,
        });
    }
    let k1 = transport_rhs(eta, trace_now, sp);
    let mut half = eta.clone();
    half.axpy(S::lit(0.5 * dt), &k1);
    let k2 = transport_rhs(&half, trace_mid, sp);
    let mut out = eta.clone();
    out.axpy(S::lit(dt), &k2);
    Ok(out)
}

/// Surface series over a horizon and the largest deviation from the initial
/// surface in the discrete `H^{5/2}` surrogate norm.
pub struct TransportSeries<S: Scalar> {
    pub etas: Vec<SurfaceField<S>>,
    pub max_h52_deviation: f64,
}

/// Integrates the transport equation over the trace series (one trace per
/// stored step time; midpoint values interpolated linearly).
pub fn solve_transport<S: Scalar>(
    eta0: &SurfaceField<S>,
    traces: &[SurfaceTrace<S>],
    dt: f64,
    grid: &Grid,
    sp: &SpectralGrid<S>,
) -> Result<TransportSeries<S>> {
    if traces.len() < 2 {
        return Err(Error::Mismatch("need traces at every step time".into()));
    }
    let mut etas = Vec::with_capacity(traces.len());
    etas.push(eta0.clone());
    let mut max_dev = 0.0f64;
    for w in traces.windows(2) {
        let mid = SurfaceTrace::lerp(&w[0], &w[1], 0.5);
        let next = advect_surface_step(etas.last().unwrap(), &w[0], &mid, dt, grid, sp)?;
        let dev = surface_sobolev_norm(&next.sub(eta0), 2.5, sp);
        max_dev = max_dev.max(dev);
        etas.push(next);
    }
    Ok(TransportSeries {
        etas,
        max_h52_deviation: max_dev,
    })
}
