//! Feedback-only closed loop on the default motor with and without dither.

use pgnn::evaluation::mae;
use pgnn::plant::{run_closed_loop, PlantConfig};
use pgnn::trajectory::preset_r2;

fn main() -> pgnn::Result<()> {
    let cfg = PlantConfig::default();
    let reference = preset_r2(cfg.ts)?;
    for dither in [false, true] {
        let log = run_closed_loop(&reference, None, &cfg, dither)?;
        let u = log.dataset.u();
        let peak_u = u.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        println!(
            "dither {dither:>5}: MAE {:.4e} m, max |e| {:.4e} m, peak force {peak_u:.1} N",
            mae(&log.e)?,
            log.e.iter().fold(0.0f64, |m, v| m.max(v.abs())),
        );
    }
    Ok(())
}
