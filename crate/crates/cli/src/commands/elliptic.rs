//! Manufactured convergence tables for the four stationary solvers.

use crate::Context;
use benard_core::error::Result;
use benard_core::manufactured::{convergence_table, observed_order, MfKind};

pub fn run(ctx: &Context) -> Result<()> {
    let opts = ctx.solver_opts();
    let ladder = [24usize, 48, 96];
    let mut csv = String::from("solver,geometry,nz,linf_error,observed_order\n");
    for kind in MfKind::ALL {
        for curved in [false, true] {
            let rows = convergence_table(kind, curved, &ladder, &opts)?;
            let order = observed_order(&rows);
            let label = if curved { "curved" } else { "flat" };
            for row in &rows {
                csv.push_str(&format!(
                    "{},{},{},{:.6e},{:.3}\n",
                    kind.name(),
                    label,
                    row.nz,
                    row.err,
                    order
                ));
            }
            println!(
                "{:10} {:6} order {:.3}  errors {:?}",
                kind.name(),
                label,
                order,
                rows.iter().map(|r| r.err).collect::<Vec<_>>()
            );
        }
    }
    std::fs::write(ctx.out.join("convergence.csv"), csv)?;
    println!("wrote {}", ctx.out.join("convergence.csv").display());
    Ok(())
}
