//! Re-derives the energy ledger and surface diagnostics from a checkpoint.

use crate::Context;
use benard_core::checkpoint::Checkpoint;
use benard_core::error::{Error, Result};
use benard_core::field::SurfaceField;
use benard_core::geometry::geometry_pack;
use benard_core::operators::normal_velocity_top;
use benard_core::picard::{aggregate_k_eta, aggregate_k_n, sweep_ledger};
use benard_core::Real;
use serde_json::json;
use std::path::Path;

pub fn run(ctx: &Context, path: &Path) -> Result<()> {
    let ck = Checkpoint::load(path)?;
    if ck.header.grid != ctx.grid {
        return Err(Error::Config(format!(
            "checkpoint grid {:?} does not match the configured grid",
            ck.header.grid
        )));
    }
    let sp = &ctx.sp;
    let mut sweep = ck.to_sweep::<Real>(sp)?;
    // surface rates re-derived from the kinematic condition
    let floor = ctx.cfg.geometry.delta / 2.0;
    for entry in sweep.entries.iter_mut() {
        let pack = geometry_pack(
            &entry.eta,
            None,
            &ctx.grid,
            ctx.cfg.geometry.epsilon,
            floor,
            sp,
        )?;
        entry.eta_t = SurfaceField::from_values(sp, normal_velocity_top(&entry.u, &pack))?;
    }
    let dt = if ck.header.times.len() > 1 {
        ck.header.times[1] - ck.header.times[0]
    } else {
        return Err(Error::Checkpoint(
            "checkpoint holds fewer than two states".into(),
        ));
    };
    let cfg = ctx.cfg.picard_config(ctx.threads)?;
    let ledger = sweep_ledger(&sweep, &cfg, sp)?;
    let doc = json!({
        "source": path.display().to_string(),
        "mode": ck.header.mode,
        "times": ck.header.times.len(),
        "ledger_residual_u": ledger.residual_u,
        "ledger_residual_theta": ledger.residual_theta,
        "k_n_u_theta": aggregate_k_n(&sweep, &ctx.grid, dt, sp),
        "k_eta": aggregate_k_eta(&sweep, dt, sp),
    });
    println!("{}", serde_json::to_string_pretty(&doc).unwrap());
    std::fs::write(
        ctx.out.join("report.json"),
        serde_json::to_string_pretty(&doc).unwrap(),
    )?;
    Ok(())
}
