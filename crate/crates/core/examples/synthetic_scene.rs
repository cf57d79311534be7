//! Writes a seeded synthetic RGB-D scene directory that the CLI can consume.
//!
//! cargo run --example synthetic_scene -- OUT_DIR [SEED] [SIZE] [CONTEXTS]

use projcond::{io, synthetic};

fn main() -> projcond::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let out = args
        .first()
        .map(String::as_str)
        .unwrap_or("synthetic_scene");
    let arg = |i: usize, default: u64| args.get(i).and_then(|s| s.parse().ok()).unwrap_or(default);
    let (seed, size, contexts) = (arg(1, 0), arg(2, 64) as usize, arg(3, 2) as usize);

    let scene = synthetic::scene(seed, size, contexts);
    io::save_scene(out, &scene.to_bundle())?;
    println!("wrote {contexts} contexts + target ({size}x{size}) to {out}");
    Ok(())
}
