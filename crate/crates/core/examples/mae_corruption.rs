//! Masked-autoencoding corruption of a context image: patch removal, pixel
//! dropout inside sparsified patches and a per-channel affine color jitter.
//!
//! cargo run --example mae_corruption -- [OUT_DIR]

use projcond::corruption::{corrupt, CorruptionSpec, PatchGrid};
use projcond::{io, synthetic};

fn main() -> projcond::Result<()> {
    let out = std::env::args().nth(1).map(std::path::PathBuf::from);
    let image = synthetic::scene(1, 64, 1).contexts[0].color.clone();

    for seed in 0..4 {
        let spec = CorruptionSpec::sampled(seed);
        let c = corrupt(&image, &spec)?;
        let grid = PatchGrid::new(64, 64, spec.patch_size)?;
        println!(
            "seed {seed}: patch {}  removed {}/{}  retained {:.1}% of pixels  gains {:.3?}",
            spec.patch_size,
            c.removed_patches().len(),
            grid.len(),
            100.0 * c.pixel_mask.fraction(),
            c.gains
        );
        if let Some(dir) = &out {
            std::fs::create_dir_all(dir).map_err(|e| projcond::Error::Io {
                path: dir.clone(),
                source: e,
            })?;
            io::save_image(dir.join(format!("corrupted{seed}.png")), &c.image)?;
            io::save_mask(dir.join(format!("pixel_mask{seed}.png")), &c.pixel_mask)?;
        }
    }

    let again = corrupt(&image, &CorruptionSpec::sampled(0))?;
    assert_eq!(again, corrupt(&image, &CorruptionSpec::sampled(0))?);
    println!("same seed reproduces the same corruption");
    Ok(())
}
