//! Surface advection tests: translating single-mode solution and mean
//! conservation under horizontal advection.

use crate::Context;
use benard_core::error::Result;
use benard_core::field::SurfaceField;
use benard_core::transport::{solve_transport, SurfaceTrace};
use benard_core::Real;

pub fn run(ctx: &Context) -> Result<()> {
    let grid = ctx.grid;
    let sp = &ctx.sp;
    let k = 2.0 * std::f64::consts::PI / grid.l1;
    let eta0 = SurfaceField::<Real>::from_fn(sp, &grid, |x, _| 0.05 * (k * x).cos());
    let c = 0.5;
    let t_final = 0.1;
    let mut rows = Vec::new();
    for nsteps in [16usize, 32, 64] {
        let dt = t_final / nsteps as f64;
        let mut tr = SurfaceTrace::zeros(&grid);
        tr.u1 = vec![c; grid.nh()];
        let traces = vec![tr; nsteps + 1];
        let series = solve_transport(&eta0, &traces, dt, &grid, sp)?;
        let want =
            SurfaceField::<Real>::from_fn(sp, &grid, |x, _| 0.05 * (k * (x - c * t_final)).cos());
        let got = series.etas.last().unwrap();
        let err = got
            .values
            .iter()
            .zip(want.values.iter())
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        println!("translating mode: nsteps = {nsteps:3}  linf error = {err:.3e}");
        rows.push((nsteps, err));
    }
    let order = ((rows[0].1 / rows[2].1).log2()) / 2.0;
    println!("observed temporal order {:.2}", order);

    // mean conservation under divergence-free horizontal advection
    let eta1 = SurfaceField::<Real>::from_fn(sp, &grid, |x, y| {
        0.08 * (k * x).cos() + 0.03 * (k * y).sin()
    });
    let mut tr = SurfaceTrace::zeros(&grid);
    tr.u1 = vec![0.4; grid.nh()];
    tr.u2 = vec![-0.25; grid.nh()];
    let nsteps = 100;
    let traces = vec![tr; nsteps + 1];
    let series = solve_transport(&eta1, &traces, 0.01, &grid, sp)?;
    let drift = (series.etas.last().unwrap().mean() - eta1.mean()).abs();
    println!("mean drift over unit time = {drift:.3e}");
    println!(
        "max H^(5/2) deviation from initial surface = {:.3e}",
        series.max_h52_deviation
    );
    Ok(())
}
