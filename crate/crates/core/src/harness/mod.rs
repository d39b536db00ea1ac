//! Dataset I/O, run configuration, evaluation and per-pair orchestration
//! used by the command-line front end.

pub mod config;
pub mod eval;
pub mod io;

use std::path::Path;

use crate::detect::{detect_changes, Detection};
use crate::error::Result;

use config::RunConfig;
use io::{draw_overlay, write_predictions, write_rgb_png, PairInputs};

/// Runs detection on one pair.
pub fn detect_pair(inputs: &PairInputs, cfg: &RunConfig) -> Result<Detection> {
    let strategy = cfg.strategy.resolve(inputs)?;
    detect_changes(
        &inputs.rgb1,
        &inputs.rgb2,
        inputs.depth1.as_ref(),
        inputs.depth2.as_ref(),
        &strategy,
        &cfg.pipeline,
    )
}

/// Writes `<name>.json` and, when enabled, overlay PNGs into `out`.
pub fn write_detection(
    out: &Path,
    inputs: &PairInputs,
    det: &Detection,
    cfg: &RunConfig,
) -> Result<()> {
    write_predictions(
        &out.join(format!("{}.json", inputs.name)),
        &det.image1,
        &det.image2,
    )?;
    if cfg.output.overlays {
        write_rgb_png(
            &out.join(format!("{}_view1_overlay.png", inputs.name)),
            &draw_overlay(&inputs.rgb1, &det.image1),
        )?;
        write_rgb_png(
            &out.join(format!("{}_view2_overlay.png", inputs.name)),
            &draw_overlay(&inputs.rgb2, &det.image2),
        )?;
    }
    Ok(())
}
