//! Builds one benchmark case per transform kind and scores the resulting
//! conditioning image against the transformed ground truth on valid pixels.
//!
//! cargo run --example consistency_bench -- [OUT_DIR]

use projcond::bench::{apply_transform, TransformSpec};
use projcond::conditioning::{projective_condition_with, RasterConfig};
use projcond::{metrics, synthetic};

fn main() -> projcond::Result<()> {
    let out = std::env::args().nth(1).map(std::path::PathBuf::from);
    let scene = synthetic::scene(5, 64, 2);
    // the target's own RGB-D view stands in for the ground truth so the
    // conditioning image is comparable with it
    let gt =
        projective_condition_with(&scene.contexts, &scene.target, &RasterConfig::default())?.color;

    let specs = [
        TransformSpec::AnisotropicPixel { ratio: 1.5 },
        TransformSpec::WorldScale { scale: 2.0 },
        TransformSpec::Fov { zoom: 0.7 },
        TransformSpec::Roll {
            angle: 30f64.to_radians(),
        },
        TransformSpec::RandomGauge {
            seed: 9,
            max_rotation: std::f64::consts::PI,
            max_translation: 10.0,
        },
    ];
    for (i, spec) in specs.iter().enumerate() {
        let case = apply_transform(spec, &scene.target, &gt, &scene.contexts)?;
        let cond = projective_condition_with(
            &case.contexts,
            &case.transformed_target,
            &RasterConfig::default(),
        )?;
        let mask = case.valid_mask.and(&cond.coverage);
        let psnr = metrics::masked_psnr(&cond.color, &case.warped_gt, &mask)?;
        println!(
            "{:<60} valid {:5.1}%  psnr on covered-valid pixels {:.1} dB",
            serde_json::to_string(spec).expect("spec serializes"),
            100.0 * case.valid_mask.fraction(),
            psnr
        );
        if let Some(dir) = &out {
            let dir = dir.join(format!("case{i}"));
            std::fs::create_dir_all(&dir).map_err(|e| projcond::Error::Io {
                path: dir.clone(),
                source: e,
            })?;
            case.save(&dir)?;
            cond.save(&dir, "condition_")?;
        }
    }
    Ok(())
}
