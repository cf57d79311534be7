//! Masked PSNR and SSIM, with the seen/unseen split driven by a conditioning
//! coverage mask.
//!
//! cargo run --example masked_metrics

use projcond::conditioning::{projective_condition_with, RasterConfig};
use projcond::image::{ColorImage, Mask};
use projcond::{metrics, synthetic};

fn main() -> projcond::Result<()> {
    let gt = ColorImage::filled(16, 16, [0.3, 0.5, 0.7]);
    let pred = ColorImage::filled(16, 16, [0.4, 0.6, 0.8]);
    println!("uniform offset 0.1: {:.6} dB", metrics::psnr(&pred, &gt)?);

    let half = Mask::from_fn(16, 16, |c, _| c < 8);
    let mut mixed = gt.clone();
    for r in 0..16 {
        for c in 8..16 {
            mixed.set(c, r, [0.5, 0.7, 0.9]);
        }
    }
    println!(
        "error only in the unmasked half: {} dB",
        metrics::masked_psnr(&mixed, &gt, &half)?
    );
    println!(
        "identical images serialize as {}",
        serde_json::to_string(&metrics::Decibels(metrics::psnr(&gt, &gt)?)).expect("serializes")
    );

    // one context alone against the two-context rendering, split by what the
    // single context actually sees
    let scene = synthetic::scene(8, 64, 2);
    let both = projective_condition_with(&scene.contexts, &scene.target, &RasterConfig::default())?;
    let one = projective_condition_with(
        &scene.contexts[..1],
        &scene.target,
        &RasterConfig::default(),
    )?;
    let report = metrics::evaluate(
        &one.color,
        &both.color,
        Some(&both.coverage),
        Some(&one.coverage),
        2,
    )?;
    println!("{}", report.to_json_line());
    Ok(())
}
