//! Builds the higher time-derivative initial data for the configured state
//! and prints all residuals as JSON.

use crate::Context;
use benard_core::data_compat::BaseForcings;
use benard_core::data_compat::{build_initial_data, compatibility_residual, InitialDataInputs};
use benard_core::error::Result;
use benard_core::field::SurfaceField;
use benard_core::geometry::geometry_pack;
use benard_core::operators::normal_velocity_top;
use benard_core::picard::nonlinear_forcings;
use benard_core::Real;
use serde_json::json;

pub fn run(ctx: &Context) -> Result<()> {
    let grid = ctx.grid;
    let sp = &ctx.sp;
    let cfg = &ctx.cfg;
    let init = cfg.initial_state::<Real>(&grid, sp)?;
    let floor = cfg.geometry.delta / 2.0;
    let pack_static = geometry_pack(&init.eta0, None, &grid, cfg.geometry.epsilon, floor, sp)?;
    let eta1 = SurfaceField::from_values(sp, normal_velocity_top(&init.u0, &pack_static))?;
    let pack = geometry_pack(
        &init.eta0,
        Some(&eta1),
        &grid,
        cfg.geometry.epsilon,
        floor,
        sp,
    )?;
    let base_step = nonlinear_forcings(&init.u0, &init.theta0, &pack, sp)?;
    let base = BaseForcings {
        f1: base_step.f1.clone(),
        f3: base_step.f3.clone(),
        f4: base_step.f4.clone(),
        f5: base_step.f5.clone(),
    };
    let base_rate = BaseForcings::zeros(&grid);
    let set = build_initial_data(
        &InitialDataInputs {
            u0: &init.u0,
            theta0: &init.theta0,
            eta0: &init.eta0,
            base: &base,
            base_rate: &base_rate,
            n_levels: 2,
            epsilon: cfg.geometry.epsilon,
            jac_floor: floor,
            buoyant_bottom_flux: false,
        },
        &grid,
        sp,
        &cfg.solver_opts(),
    )?;
    let mut levels = Vec::new();
    for level in 0..set.forcing.len() {
        let res = compatibility_residual(&set, level, sp)?;
        levels.push(json!({
            "level": level,
            "tangential": res.tangential,
            "divergence": res.divergence,
            "bottom_trace": res.bottom_trace,
            "total": res.total(),
        }));
    }
    let doc = json!({
        "n_levels": set.n_levels,
        "field_maxima": {
            "eta_t": set.eta[1].linf(),
            "eta_tt": set.eta[2].linf(),
            "theta_t": set.theta[1].linf(),
            "u_t": set.u[1].linf(),
            "p0": set.p[0].linf(),
        },
        "compatibility": levels,
    });
    println!("{}", serde_json::to_string_pretty(&doc).unwrap());
    std::fs::write(
        ctx.out.join("init-data.json"),
        serde_json::to_string_pretty(&doc).unwrap(),
    )?;
    Ok(())
}
