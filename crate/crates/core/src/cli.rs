//! Command-line front end. The `projcond` binary is a thin wrapper around [`run`].
//!
//! Structured output is one JSON object per line on stdout; diagnostics go to
//! stderr. Output directories are staged in a sibling temp directory and
//! renamed into place once complete.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;
use serde_json::json;

use crate::bench::{self, DollySchedule, DollyZoomParams, TransformKind, TransformSpec};
use crate::conditioning::{projective_condition_with, RasterConfig, DEFAULT_SPLAT_RADIUS};
use crate::corruption::{self, CorruptionSpec};
use crate::error::{Error, Result};
use crate::io::{self, CameraRecord, SceneBundle};
use crate::metrics;
use crate::verify;

pub const THREADS_ENV: &str = "PVSM_THREADS";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(i32)]
pub enum ExitStatus {
    Success = 0,
    VerificationFailure = 1,
    Usage = 2,
    Io = 3,
}

impl ExitStatus {
    pub fn code(self) -> i32 {
        self as i32
    }

    pub fn for_error(e: &Error) -> ExitStatus {
        match e {
            Error::Io { .. }
            | Error::MissingFile(_)
            | Error::MalformedJson { .. }
            | Error::MalformedHeader { .. }
            | Error::Codec { .. }
            | Error::ConventionMismatch(_) => ExitStatus::Io,
            _ => ExitStatus::Usage,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "projcond",
    version,
    about = "Projective conditioning and camera-robustness benchmark tools"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Rasterize context views into a target camera.
    Project(ProjectArgs),
    /// Build one benchmark case under a camera transform.
    Bench(BenchArgs),
    /// Emit a dolly-zoom camera trajectory as JSON lines.
    Dolly(DollyArgs),
    /// Apply masked-autoencoding corruption to an image.
    Corrupt(CorruptArgs),
    /// Masked PSNR / SSIM between two images.
    Metrics(MetricsArgs),
    /// Run the built-in invariant suite.
    Verify(VerifyArgs),
}

#[derive(Debug, Args)]
struct SceneArgs {
    /// Scene directory containing scene.json.
    #[arg(long)]
    scene: PathBuf,
    /// Comma-separated context view ids (default: the scene's context list).
    #[arg(long, value_delimiter = ',')]
    context: Option<Vec<String>>,
    /// Target view id (default: the scene's first target).
    #[arg(long)]
    target: Option<String>,
    /// Splat radius in pixels.
    #[arg(long, default_value_t = DEFAULT_SPLAT_RADIUS)]
    radius: f64,
}

#[derive(Debug, Args)]
struct OutArgs {
    #[arg(long)]
    out: PathBuf,
    /// Replace an existing output directory.
    #[arg(long)]
    force: bool,
}

#[derive(Debug, Args)]
struct ProjectArgs {
    #[command(flatten)]
    scene: SceneArgs,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Debug, Args)]
struct BenchArgs {
    #[command(flatten)]
    scene: SceneArgs,
    /// anisotropic | world-scale | fov | roll | gauge
    #[arg(long)]
    transform: String,
    /// Transform parameter: ratio, scale, zoom, roll in degrees, or gauge max translation.
    /// Sampled from the default range when omitted.
    #[arg(long, allow_negative_numbers = true)]
    param: Option<f64>,
    #[arg(long)]
    seed: u64,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Debug, Args)]
struct DollyArgs {
    #[arg(long)]
    scene: PathBuf,
    /// View whose camera starts the trajectory (default: the scene's first target).
    #[arg(long)]
    view: Option<String>,
    /// Depth of the anchor plane along the initial optical axis.
    #[arg(long)]
    anchor_depth: f64,
    #[arg(long)]
    frames: usize,
    /// Initial vertical field of view in degrees.
    #[arg(long, requires = "fov_end", conflicts_with = "delta_end")]
    fov_start: Option<f64>,
    /// Final vertical field of view in degrees.
    #[arg(long, requires = "fov_start")]
    fov_end: Option<f64>,
    /// Final forward displacement; the schedule runs linearly from 0.
    #[arg(
        long,
        allow_negative_numbers = true,
        required_unless_present = "fov_start"
    )]
    delta_end: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_SPLAT_RADIUS)]
    radius: f64,
    /// Also render the conditioning image of every frame into this directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    force: bool,
}

#[derive(Debug, Args)]
struct CorruptArgs {
    #[arg(long)]
    image: PathBuf,
    /// Corruption spec as inline JSON or a path to a JSON file. Must contain
    /// `seed`; other fields default to values sampled from that seed.
    #[arg(long)]
    spec: String,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Debug, Args)]
struct MetricsArgs {
    #[arg(long)]
    pred: PathBuf,
    #[arg(long)]
    gt: PathBuf,
    /// Evaluation mask PNG (nonzero = evaluated).
    #[arg(long)]
    mask: Option<PathBuf>,
    /// Conditioning coverage PNG for the seen/unseen split.
    #[arg(long)]
    coverage: Option<PathBuf>,
    /// Dilation radius of the seen region in pixels.
    #[arg(long, default_value_t = 0)]
    dilate: usize,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    #[arg(long)]
    seed: u64,
}

/// Parses `args` (including the program name) and runs the command, writing
/// to the process stdout/stderr. Returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    if let Err(msg) = configure_threads() {
        eprintln!("error: {msg}");
        return ExitStatus::Usage.code();
    }
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    let result = match cli.command {
        Command::Project(a) => cmd_project(a, &mut out),
        Command::Bench(a) => cmd_bench(a, &mut out),
        Command::Dolly(a) => cmd_dolly(a, &mut out),
        Command::Corrupt(a) => cmd_corrupt(a, &mut out),
        Command::Metrics(a) => cmd_metrics(a, &mut out),
        Command::Verify(a) => cmd_verify(a, &mut out),
    };
    match result {
        Ok(status) => status.code(),
        Err(e) => {
            eprintln!("error: {e}");
            ExitStatus::for_error(&e).code()
        }
    }
}

fn configure_threads() -> std::result::Result<(), String> {
    let Ok(value) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .map_err(|_| format!("{THREADS_ENV} must be a non-negative integer, got {value:?}"))?;
    // a pool that is already initialized (repeated in-process calls) is fine
    let _ = rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global();
    Ok(())
}

fn emit(out: &mut impl Write, value: &serde_json::Value) -> Result<()> {
    writeln!(out, "{value}").map_err(|e| Error::io("<stdout>", e))
}

/// Creates a staging directory next to `out`; [`commit_dir`] moves it into place.
fn stage_dir(args: &OutArgs) -> Result<PathBuf> {
    if args.out.exists() && !args.force {
        return Err(Error::OutputExists(args.out.clone()));
    }
    let name = args
        .out
        .file_name()
        .ok_or_else(|| Error::InvalidSpec(format!("invalid output path {}", args.out.display())))?;
    let mut staged_name = OsString::from(".");
    staged_name.push(name);
    staged_name.push(format!(".tmp-{}", std::process::id()));
    let staged = args.out.with_file_name(staged_name);
    if staged.exists() {
        std::fs::remove_dir_all(&staged).map_err(|e| Error::io(&staged, e))?;
    }
    std::fs::create_dir_all(&staged).map_err(|e| Error::io(&staged, e))?;
    Ok(staged)
}

fn commit_dir(staged: &Path, args: &OutArgs) -> Result<()> {
    if args.out.exists() {
        std::fs::remove_dir_all(&args.out).map_err(|e| Error::io(&args.out, e))?;
    }
    std::fs::rename(staged, &args.out).map_err(|e| Error::io(&args.out, e))
}

/// Runs `write` against a staging directory and publishes it only on success.
fn with_output_dir(args: &OutArgs, write: impl FnOnce(&Path) -> Result<()>) -> Result<()> {
    let staged = stage_dir(args)?;
    match write(&staged) {
        Ok(()) => commit_dir(&staged, args),
        Err(e) => {
            let _ = std::fs::remove_dir_all(&staged);
            Err(e)
        }
    }
}

struct Selection {
    bundle: SceneBundle,
    context_ids: Vec<String>,
    target_id: String,
}

fn select(args: &SceneArgs) -> Result<Selection> {
    let bundle = io::load_scene(&args.scene)?;
    let context_ids = args
        .context
        .clone()
        .unwrap_or_else(|| bundle.context_ids.clone());
    let target_id = match &args.target {
        Some(t) => t.clone(),
        None => bundle
            .target_ids
            .first()
            .cloned()
            .ok_or_else(|| Error::InvalidSpec("scene lists no target; pass --target".into()))?,
    };
    bundle.view(&target_id)?;
    Ok(Selection {
        bundle,
        context_ids,
        target_id,
    })
}

fn cmd_project(args: ProjectArgs, out: &mut impl Write) -> Result<ExitStatus> {
    let sel = select(&args.scene)?;
    let contexts = sel.bundle.contexts(&sel.context_ids)?;
    let target = sel.bundle.view(&sel.target_id)?.camera;
    let image = projective_condition_with(
        &contexts,
        &target,
        &RasterConfig::with_radius(args.scene.radius),
    )?;
    with_output_dir(&args.out, |dir| image.save(dir, ""))?;
    emit(
        out,
        &json!({
            "command": "project",
            "target": sel.target_id,
            "contexts": sel.context_ids,
            "covered_pixels": image.coverage.count(),
            "coverage_fraction": image.coverage.fraction(),
            "out": args.out.out,
        }),
    )?;
    Ok(ExitStatus::Success)
}

fn bench_spec(kind: TransformKind, param: Option<f64>, seed: u64) -> TransformSpec {
    let Some(p) = param else {
        return TransformSpec::sample(kind, seed);
    };
    match kind {
        TransformKind::AnisotropicPixel => TransformSpec::AnisotropicPixel { ratio: p },
        TransformKind::WorldScale => TransformSpec::WorldScale { scale: p },
        TransformKind::Fov => TransformSpec::Fov { zoom: p },
        TransformKind::Roll => TransformSpec::Roll {
            angle: p.to_radians(),
        },
        TransformKind::RandomGauge => TransformSpec::RandomGauge {
            seed,
            max_rotation: bench::defaults::GAUGE_MAX_ROTATION,
            max_translation: p,
        },
    }
}

fn cmd_bench(args: BenchArgs, out: &mut impl Write) -> Result<ExitStatus> {
    let kind: TransformKind = args.transform.parse()?;
    let spec = bench_spec(kind, args.param, args.seed);
    spec.validate()?;
    let sel = select(&args.scene)?;
    let contexts = sel.bundle.contexts(&sel.context_ids)?;
    let target = sel.bundle.view(&sel.target_id)?;
    let case = bench::apply_transform(&spec, &target.camera, &target.color, &contexts)?;
    let cond = projective_condition_with(
        &case.contexts,
        &case.transformed_target,
        &RasterConfig::with_radius(args.scene.radius),
    )?;
    with_output_dir(&args.out, |dir| {
        case.save(dir)?;
        cond.save(dir, "condition_")
    })?;
    let record = case.record();
    emit(
        out,
        &json!({
            "command": "bench",
            "target": sel.target_id,
            "spec": record.spec,
            "valid_fraction": record.valid_fraction,
            "covered_pixels": cond.coverage.count(),
            "out": args.out.out,
        }),
    )?;
    Ok(ExitStatus::Success)
}

fn cmd_dolly(args: DollyArgs, out: &mut impl Write) -> Result<ExitStatus> {
    let schedule = match (args.fov_start, args.fov_end, args.delta_end) {
        (Some(a), Some(b), _) => DollyZoomParams::linear_fovs(
            args.anchor_depth,
            a.to_radians(),
            b.to_radians(),
            args.frames,
        ),
        (_, _, Some(d)) => DollyZoomParams::linear_deltas(args.anchor_depth, d, args.frames),
        _ => {
            return Err(Error::InvalidSpec(
                "pass --delta-end or both --fov-start and --fov-end".into(),
            ))
        }
    };
    let bundle = io::load_scene(&args.scene)?;
    let view_id = match &args.view {
        Some(v) => v.clone(),
        None => bundle
            .target_ids
            .first()
            .cloned()
            .ok_or_else(|| Error::InvalidSpec("scene lists no target; pass --view".into()))?,
    };
    let initial = bundle.view(&view_id)?.camera;
    let trajectory = bench::dolly_zoom_trajectory(&initial, &schedule)?;
    let deltas: Vec<f64> = match &schedule.schedule {
        DollySchedule::Deltas(d) => d.clone(),
        DollySchedule::Fovs(f) => {
            let fov0 = initial.intrinsics.vertical_fov();
            f.iter()
                .map(|&fov| bench::delta_for_fov(fov0, args.anchor_depth, fov))
                .collect()
        }
    };
    if let Some(dir) = &args.out {
        let out_args = OutArgs {
            out: dir.clone(),
            force: args.force,
        };
        let contexts = bundle.contexts(&bundle.context_ids)?;
        let config = RasterConfig::with_radius(args.radius);
        with_output_dir(&out_args, |staged| {
            for (i, cam) in trajectory.iter().enumerate() {
                projective_condition_with(&contexts, cam, &config)?
                    .save(staged, &format!("frame{i:04}_"))?;
            }
            Ok(())
        })?;
    }
    for (i, (cam, delta)) in trajectory.iter().zip(&deltas).enumerate() {
        emit(
            out,
            &json!({
                "frame": i,
                "delta": delta,
                "vertical_fov_deg": cam.intrinsics.vertical_fov().to_degrees(),
                "camera": CameraRecord::from(cam),
            }),
        )?;
    }
    Ok(ExitStatus::Success)
}

/// Corruption spec as accepted on the command line: everything but `seed` is optional.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SpecOverrides {
    seed: u64,
    patch_size: Option<usize>,
    patch_mask_ratio: Option<f64>,
    sparsify_fraction: Option<f64>,
    pixel_drop_prob: Option<f64>,
    gain_range: Option<[f64; 2]>,
    bias_range: Option<[f64; 2]>,
}

fn parse_corruption_spec(arg: &str) -> Result<CorruptionSpec> {
    let (text, origin) = if arg.trim_start().starts_with('{') {
        (arg.to_string(), PathBuf::from("<--spec>"))
    } else {
        let path = PathBuf::from(arg);
        let text = std::fs::read_to_string(&path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::MissingFile(path.clone()),
            _ => Error::io(&path, e),
        })?;
        (text, path)
    };
    let o: SpecOverrides = serde_json::from_str(&text)
        .map_err(|e| Error::InvalidSpec(format!("{}: {e}", origin.display())))?;
    let base = CorruptionSpec::sampled(o.seed);
    let spec = CorruptionSpec {
        patch_size: o.patch_size.unwrap_or(base.patch_size),
        patch_mask_ratio: o.patch_mask_ratio.unwrap_or(base.patch_mask_ratio),
        sparsify_fraction: o.sparsify_fraction.unwrap_or(base.sparsify_fraction),
        pixel_drop_prob: o.pixel_drop_prob.unwrap_or(base.pixel_drop_prob),
        gain_range: o.gain_range.unwrap_or(base.gain_range),
        bias_range: o.bias_range.unwrap_or(base.bias_range),
        seed: o.seed,
    };
    spec.validate()?;
    Ok(spec)
}

fn cmd_corrupt(args: CorruptArgs, out: &mut impl Write) -> Result<ExitStatus> {
    let spec = parse_corruption_spec(&args.spec)?;
    let image = io::load_image(&args.image)?;
    let result = corruption::corrupt(&image, &spec)?;
    with_output_dir(&args.out, |dir| {
        io::save_image(dir.join("corrupted.png"), &result.image)?;
        io::save_mask(dir.join("patch_mask.png"), &result.patch_mask)?;
        io::save_mask(dir.join("pixel_mask.png"), &result.pixel_mask)?;
        let path = dir.join("spec.json");
        let json = serde_json::to_string_pretty(&spec).expect("spec serializes");
        std::fs::write(&path, json + "\n").map_err(|e| Error::io(&path, e))
    })?;
    emit(
        out,
        &json!({
            "command": "corrupt",
            "spec": spec,
            "removed_patches": result.removed_patches(),
            "retained_pixels": result.pixel_mask.count(),
            "gains": result.gains,
            "biases": result.biases,
            "out": args.out.out,
        }),
    )?;
    Ok(ExitStatus::Success)
}

fn cmd_metrics(args: MetricsArgs, out: &mut impl Write) -> Result<ExitStatus> {
    let pred = io::load_image(&args.pred)?;
    let gt = io::load_image(&args.gt)?;
    let mask = args.mask.as_ref().map(io::load_mask).transpose()?;
    let coverage = args.coverage.as_ref().map(io::load_mask).transpose()?;
    let report = metrics::evaluate(&pred, &gt, mask.as_ref(), coverage.as_ref(), args.dilate)?;
    writeln!(out, "{}", report.to_json_line()).map_err(|e| Error::io("<stdout>", e))?;
    Ok(ExitStatus::Success)
}

fn cmd_verify(args: VerifyArgs, out: &mut impl Write) -> Result<ExitStatus> {
    let results = verify::run(args.seed);
    let mut all = true;
    for r in &results {
        all &= r.pass;
        emit(out, &serde_json::to_value(r).expect("result serializes"))?;
        eprintln!(
            "{:<32} {}",
            r.property,
            if r.pass { "PASS" } else { "FAIL" }
        );
    }
    Ok(if all {
        ExitStatus::Success
    } else {
        ExitStatus::VerificationFailure
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }

    #[test]
    fn exit_codes_are_stable() {
        assert_eq!(ExitStatus::Success.code(), 0);
        assert_eq!(ExitStatus::VerificationFailure.code(), 1);
        assert_eq!(ExitStatus::Usage.code(), 2);
        assert_eq!(ExitStatus::Io.code(), 3);
        assert_eq!(
            ExitStatus::for_error(&Error::MissingFile("x".into())),
            ExitStatus::Io
        );
        assert_eq!(
            ExitStatus::for_error(&Error::UnknownView("x".into())),
            ExitStatus::Usage
        );
    }

    #[test]
    fn partial_corruption_spec_fills_from_seed() {
        let spec = parse_corruption_spec(r#"{"seed": 3, "patch_mask_ratio": 0.5}"#).unwrap();
        let base = CorruptionSpec::sampled(3);
        assert_eq!(spec.patch_mask_ratio, 0.5);
        assert_eq!(spec.gain_range, base.gain_range);
        assert!(parse_corruption_spec(r#"{"patch_size": 8}"#).is_err());
    }
}
