//! Full fixed-point iteration: per-sweep records as JSONL, final checkpoint.

use crate::Context;
use benard_core::checkpoint::Checkpoint;
use benard_core::error::Result;
use benard_core::picard::run_picard;
use benard_core::Real;

pub fn run(ctx: &Context) -> Result<()> {
    let grid = ctx.grid;
    let sp = &ctx.sp;
    let cfg = ctx.cfg.picard_config(ctx.threads)?;
    let init = ctx.cfg.initial_state::<Real>(&grid, sp)?;
    let run = run_picard(&cfg, &init, sp)?;
    let mut jsonl = String::new();
    for rec in &run.records {
        jsonl.push_str(&serde_json::to_string(rec).unwrap());
        jsonl.push('\n');
        let ratio = rec
            .n_ratio
            .map(|r| format!("{r:.4}"))
            .unwrap_or_else(|| "-".to_string());
        println!(
            "sweep {:2}: N-dist {:.6e}  M-dist {:.6e}  ratio {}  minJ {:.4}  div {:.2e}",
            rec.sweep, rec.n_dist, rec.m_dist, ratio, rec.min_j, rec.max_div_residual
        );
    }
    std::fs::write(ctx.out.join("records.jsonl"), jsonl)?;
    let mode = if ctx.threads <= 1 {
        "single-thread".to_string()
    } else {
        format!("threads-{}", ctx.threads)
    };
    let ck = Checkpoint::from_sweep(&run.final_sweep, &grid, &mode);
    ck.save(&ctx.out.join("state.ckpt"))?;
    println!(
        "{} after {} sweeps; wrote {} and {}",
        if run.converged {
            "converged"
        } else {
            "stopped"
        },
        run.records.len(),
        ctx.out.join("records.jsonl").display(),
        ctx.out.join("state.ckpt").display()
    );
    Ok(())
}
