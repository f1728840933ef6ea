//! Command implementations behind the `ellipsekit` binary.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use ellipsekit::codec::{decode_ellipse, encode_ellipse, VisibilityScale};
use ellipsekit::io::{
    read_annotations, read_cameras, read_detection_lines, read_detections, read_pgm, read_poses, scene_lines,
    write_jsonl, write_pgm, PoseJson,
};
use ellipsekit::metrics::{display_mr, evaluate, AtThreshold, EvalCriteria, EvalReport, Preset, DEFAULT_CIRCULAR_TAU};
use ellipsekit::mvee::{mask_to_points, mvee, DEFAULT_MAX_ITER, DEFAULT_TOL};
use ellipsekit::quadric::{decompose_quadric, pose_errors, reconstruct, CameraMatrix, EllipsoidPose, MIN_VIEWS};
use ellipsekit::synth::{generate_dataset, SceneConfig};
use ellipsekit::{Ellipse, Error, GridSpec, SquareRegion};
use rand::{Rng, SeedableRng};
use serde::Serialize;

/// Exit status of a command.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exit {
    Ok = 0,
    Undefined = 1,
    Input = 2,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Undefined(String),
}

impl CliError {
    pub fn exit(&self) -> Exit {
        match self {
            CliError::Input(_) => Exit::Input,
            CliError::Undefined(_) => Exit::Undefined,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::UndefinedMetric(_) => CliError::Undefined(e.to_string()),
            other => CliError::Input(other.to_string()),
        }
    }
}

fn ctx<T, E: std::fmt::Display>(what: impl AsRef<str>, r: std::result::Result<T, E>) -> Result<T, CliError> {
    r.map_err(|e| CliError::Input(format!("{}: {e}", what.as_ref())))
}

fn open(path: &Path) -> Result<BufReader<File>, CliError> {
    ctx(format!("cannot read {}", path.display()), File::open(path)).map(BufReader::new)
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        ctx(format!("cannot create {}", dir.display()), fs::create_dir_all(dir))?;
    }
    ctx(format!("cannot write {}", path.display()), File::create(path)).map(BufWriter::new)
}

#[derive(Debug, Parser)]
#[command(name = "ellipsekit", version, about = "Ellipse detection toolkit: scenes, evaluation, fitting, reconstruction")]
pub struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true, env = "ELLIPSEKIT_THREADS")]
    pub threads: Option<usize>,
    /// Suppress the stdout summary.
    #[arg(long, global = true)]
    pub quiet: bool,
    /// Print angles in degrees (files always use radians).
    #[arg(long, global = true)]
    pub degrees: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate synthetic occluded-ellipse scenes.
    Generate(GenerateArgs),
    /// Evaluate detections against ground truth.
    Eval(EvalArgs),
    /// Reconstruct ellipsoids from multi-view detections.
    Reconstruct(ReconstructArgs),
    /// Randomized encode/decode round trip of the ellipse codec.
    Selftest(SelftestArgs),
    /// Fit a minimum-volume enclosing ellipse to a PGM mask.
    Fit(FitArgs),
    /// Draw ground truth and detections of one image as SVG.
    Svg(SvgArgs),
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// Scene config JSON; defaults are used when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides the number of scenes.
    #[arg(long)]
    pub scenes: Option<usize>,
    /// Also write PGM label maps.
    #[arg(long)]
    pub raster: bool,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub gt: PathBuf,
    #[arg(long)]
    pub det: PathBuf,
    /// Threshold grid: soe, sof (alias rof) or default.
    #[arg(long, default_value = "default")]
    pub preset: String,
    /// Skip the angle test for near-circular ground truth.
    #[arg(long)]
    pub angle_exempt_circular: bool,
    /// b/a ratio above which a ground truth counts as circular.
    #[arg(long, default_value_t = DEFAULT_CIRCULAR_TAU)]
    pub circular_tau: f64,
    /// IoU grid cells along the longer side.
    #[arg(long)]
    pub iou_resolution: Option<usize>,
    /// CSV report path.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReconstructArgs {
    /// JSON array of {"image_id", "p"} cameras.
    #[arg(long)]
    pub cameras: PathBuf,
    /// JSONL detections carrying an object_id.
    #[arg(long)]
    pub det: PathBuf,
    /// JSON array of ground-truth poses, for error metrics.
    #[arg(long)]
    pub gt: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SelftestArgs {
    #[arg(long, default_value_t = 100_000)]
    pub cases: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Binary PGM mask.
    #[arg(long)]
    pub mask: PathBuf,
    /// Use only pixels with this value (default: any nonzero pixel).
    #[arg(long)]
    pub label: Option<u8>,
    #[arg(long, default_value_t = DEFAULT_TOL)]
    pub tol: f64,
    #[arg(long, default_value_t = DEFAULT_MAX_ITER)]
    pub max_iter: usize,
}

#[derive(Debug, Args)]
pub struct SvgArgs {
    #[arg(long)]
    pub gt: Option<PathBuf>,
    #[arg(long)]
    pub det: Option<PathBuf>,
    #[arg(long)]
    pub image_id: String,
    #[arg(long, default_value_t = 128)]
    pub width: usize,
    #[arg(long, default_value_t = 128)]
    pub height: usize,
    /// Hide detections below this score.
    #[arg(long, default_value_t = 0.0)]
    pub min_score: f64,
    #[arg(long)]
    pub out: PathBuf,
}

/// Output switches shared by all commands.
#[derive(Debug, Clone, Copy, Default)]
pub struct Display {
    pub quiet: bool,
    pub degrees: bool,
}

impl Display {
    fn angle(&self, rad: f64) -> String {
        if self.degrees {
            format!("{:.4}°", rad.to_degrees())
        } else {
            format!("{rad:.6}")
        }
    }
}

/// Runs a parsed command line; diagnostics go to `err`.
pub fn run(cli: Cli, out: &mut dyn Write, err: &mut dyn Write) -> Exit {
    if let Some(n) = cli.threads {
        // a pool may already exist when called repeatedly in-process
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let disp = Display {
        quiet: cli.quiet,
        degrees: cli.degrees,
    };
    let result = match &cli.command {
        Command::Generate(a) => cmd_generate(a, disp, out),
        Command::Eval(a) => cmd_eval(a, disp, out),
        Command::Reconstruct(a) => cmd_reconstruct(a, disp, out, err),
        Command::Selftest(a) => cmd_selftest(a, disp, out),
        Command::Fit(a) => cmd_fit(a, disp, out),
        Command::Svg(a) => cmd_svg(a, disp, out),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit()
        }
    }
}

fn say(disp: Display, out: &mut dyn Write, text: impl AsRef<str>) -> Result<(), CliError> {
    if !disp.quiet {
        ctx("cannot write to stdout", writeln!(out, "{}", text.as_ref()))?;
    }
    Ok(())
}

pub fn cmd_generate(args: &GenerateArgs, disp: Display, out: &mut dyn Write) -> Result<Exit, CliError> {
    let mut cfg = match &args.config {
        Some(path) => ctx(
            format!("invalid config {}", path.display()),
            serde_json::from_reader::<_, SceneConfig>(open(path)?),
        )?,
        None => SceneConfig::default(),
    };
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(n) = args.scenes {
        cfg.scenes = n;
    }
    cfg.validate()?;
    let scenes = generate_dataset(&cfg, args.raster)?;

    ctx("cannot create output directory", fs::create_dir_all(&args.out))?;
    let cfg_path = args.out.join("config.json");
    let mut w = create(&cfg_path)?;
    ctx("cannot write config", serde_json::to_writer_pretty(&mut w, &cfg))?;
    ctx("cannot write config", w.write_all(b"\n").and_then(|_| w.flush()))?;

    let lines: Vec<_> = scenes.iter().flat_map(scene_lines).collect();
    let mut w = create(&args.out.join("annotations.jsonl"))?;
    write_jsonl(&mut w, &lines)?;
    ctx("cannot write annotations", w.flush())?;

    #[derive(Serialize)]
    struct OccluderLine<'a> {
        image_id: &'a str,
        width: usize,
        height: usize,
        triangles: &'a [ellipsekit::synth::Triangle],
    }
    let occ: Vec<_> = scenes
        .iter()
        .map(|s| OccluderLine {
            image_id: &s.image_id,
            width: s.width,
            height: s.height,
            triangles: &s.occluders,
        })
        .collect();
    let mut w = create(&args.out.join("scenes.jsonl"))?;
    write_jsonl(&mut w, &occ)?;
    ctx("cannot write scenes", w.flush())?;

    if args.raster {
        for s in &scenes {
            if let Some(raster) = &s.raster {
                let mut w = create(&args.out.join("labels").join(format!("{}.pgm", s.image_id)))?;
                write_pgm(&mut w, raster)?;
                ctx("cannot write label map", w.flush())?;
            }
        }
    }
    say(
        disp,
        out,
        format!("wrote {} scenes, {} objects to {}", scenes.len(), lines.len(), args.out.display()),
    )?;
    Ok(Exit::Ok)
}

/// `v` with four significant digits, plain decimal notation.
pub fn sig4(v: f64) -> String {
    if !v.is_finite() {
        return format!("{v}");
    }
    if v == 0.0 {
        return "0.000".into();
    }
    let mag = v.abs().log10().floor() as i32;
    let decimals = (3 - mag).max(0) as usize;
    let s = format!("{v:.decimals$}");
    // rounding may carry into a new digit (9.9996 -> 10.000)
    let digits = s.chars().filter(|c| c.is_ascii_digit()).collect::<String>();
    if digits.trim_start_matches('0').len() > 4 && decimals > 0 {
        let d = decimals - 1;
        format!("{v:.d$}")
    } else {
        s
    }
}

fn threshold_label(t: f64, iou: bool) -> String {
    if iou {
        format!("{}", (t * 100.0).round() as i64)
    } else {
        format!("{t}")
    }
}

/// Wide CSV: one header row and one value row.
pub fn report_csv(r: &EvalReport) -> String {
    let mut head = Vec::new();
    let mut vals = Vec::new();
    let mut block = |name: &str, star: f64, rows: &[AtThreshold], iou: bool, mr: bool| {
        let shown = |v: f64| sig4(if mr { display_mr(v) } else { v });
        head.push(format!("{name}_star"));
        vals.push(shown(star));
        for t in rows {
            head.push(format!("{name}_{}", threshold_label(t.threshold, iou)));
            vals.push(shown(t.value));
        }
    };
    block("AP", r.ap_star, &r.ap, true, false);
    block("MR", r.mr_star, &r.mr, true, true);
    block("AP_theta", r.ap_theta_star, &r.ap_theta, false, false);
    block("MR_theta", r.mr_theta_star, &r.mr_theta, false, true);
    format!("{}\n{}\n", head.join(","), vals.join(","))
}

fn report_table(r: &EvalReport, crit: &EvalCriteria) -> String {
    let mut s = format!(
        "images {}  ground truth {}  detections {}\n",
        r.n_images, r.n_gt, r.n_det
    );
    let row = |name: &str, star: f64, rows: &[AtThreshold], iou: bool, mr: bool| {
        let shown = |v: f64| sig4(if mr { display_mr(v) } else { v });
        let mut line = format!("{name:<9}{:>8}", shown(star));
        for t in rows {
            let label = if iou {
                format!("@{}", threshold_label(t.threshold, true))
            } else {
                format!("@{}°", t.threshold)
            };
            line.push_str(&format!("  {label} {}", shown(t.value)));
        }
        line
    };
    s.push_str(&row("AP*", r.ap_star, &r.ap, true, false));
    s.push('\n');
    s.push_str(&row("MR*", r.mr_star, &r.mr, true, true));
    s.push('\n');
    s.push_str(&row("APθ*", r.ap_theta_star, &r.ap_theta, false, false));
    s.push('\n');
    s.push_str(&row("MRθ*", r.mr_theta_star, &r.mr_theta, false, true));
    s.push('\n');
    s.push_str(&format!("angle criteria at IoU {}", crit.default_iou));
    s
}

pub fn cmd_eval(args: &EvalArgs, disp: Display, out: &mut dyn Write) -> Result<Exit, CliError> {
    let preset: Preset = args.preset.parse()?;
    let mut crit = EvalCriteria::preset(preset);
    if args.angle_exempt_circular {
        crit.circular_angle_exempt = Some(args.circular_tau);
    }
    if let Some(r) = args.iou_resolution {
        crit.iou_resolution = r;
    }
    crit.validate()?;
    let gts = ctx(format!("invalid ground truth {}", args.gt.display()), read_annotations(open(&args.gt)?))?;
    let dets = ctx(format!("invalid detections {}", args.det.display()), read_detections(open(&args.det)?))?;
    let report = evaluate(&dets, &gts, &crit)?;
    if let Some(path) = &args.out {
        let mut w = create(path)?;
        ctx("cannot write report", w.write_all(report_csv(&report).as_bytes()).and_then(|_| w.flush()))?;
    }
    say(disp, out, report_table(&report, &crit))?;
    Ok(Exit::Ok)
}

#[derive(Debug, Serialize)]
struct PoseErrorRow {
    object_id: String,
    rotation_deg: f64,
    position: f64,
    relative_size: f64,
}

#[derive(Debug, Serialize)]
struct Skipped {
    object_id: String,
    reason: String,
}

#[derive(Debug, Serialize)]
struct ReconstructOutput {
    poses: Vec<PoseJson>,
    skipped: Vec<Skipped>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    errors: Vec<PoseErrorRow>,
}

type View = (CameraMatrix<f64>, Ellipse<f64>);

pub fn cmd_reconstruct(
    args: &ReconstructArgs,
    disp: Display,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<Exit, CliError> {
    let cameras: BTreeMap<String, CameraMatrix<f64>> = ctx(
        format!("invalid cameras {}", args.cameras.display()),
        read_cameras(open(&args.cameras)?),
    )?
    .into_iter()
    .collect();
    let lines = ctx(
        format!("invalid detections {}", args.det.display()),
        read_detection_lines(open(&args.det)?),
    )?;
    let gt: BTreeMap<String, EllipsoidPose<f64>> = match &args.gt {
        Some(p) => ctx(format!("invalid poses {}", p.display()), read_poses(open(p)?))?
            .into_iter()
            .collect(),
        None => BTreeMap::new(),
    };

    let mut views: BTreeMap<String, Vec<View>> = BTreeMap::new();
    for (i, l) in lines.iter().enumerate() {
        let id = l
            .object_id
            .clone()
            .ok_or_else(|| CliError::Input(format!("detection line {} has no object_id", i + 1)))?;
        let cam = cameras
            .get(&l.image_id)
            .ok_or_else(|| CliError::Input(format!("no camera for image '{}'", l.image_id)))?;
        let e = ctx(format!("detection line {}", i + 1), l.ellipse.to_ellipse())?;
        views.entry(id).or_default().push((*cam, e));
    }

    let mut result = ReconstructOutput {
        poses: Vec::new(),
        skipped: Vec::new(),
        errors: Vec::new(),
    };
    for (id, v) in &views {
        if v.len() < MIN_VIEWS {
            let reason = format!("{} view(s), need at least {MIN_VIEWS}", v.len());
            let _ = writeln!(err, "warning: skipping object '{id}': {reason}");
            result.skipped.push(Skipped {
                object_id: id.clone(),
                reason,
            });
            continue;
        }
        match reconstruct(v).and_then(|q| decompose_quadric(&q)) {
            Ok(pose) => {
                if let Some(g) = gt.get(id) {
                    let e = pose_errors(&pose, g);
                    result.errors.push(PoseErrorRow {
                        object_id: id.clone(),
                        rotation_deg: e.rotation_deg,
                        position: e.position,
                        relative_size: e.relative_size,
                    });
                }
                result.poses.push(PoseJson::from_pose(id.clone(), &pose));
            }
            Err(e) => {
                let _ = writeln!(err, "warning: skipping object '{id}': {e}");
                result.skipped.push(Skipped {
                    object_id: id.clone(),
                    reason: e.to_string(),
                });
            }
        }
    }

    let json = ctx("cannot serialize output", serde_json::to_string_pretty(&result))?;
    match &args.out {
        Some(path) => {
            let mut w = create(path)?;
            ctx("cannot write output", writeln!(w, "{json}").and_then(|_| w.flush()))?;
        }
        None if !disp.quiet => ctx("cannot write to stdout", writeln!(out, "{json}"))?,
        None => {}
    }
    if args.out.is_some() {
        say(
            disp,
            out,
            format!("reconstructed {} object(s), skipped {}", result.poses.len(), result.skipped.len()),
        )?;
        if !result.errors.is_empty() {
            say(disp, out, format!("{:<12} {:>12} {:>12} {:>12}", "object", "rot_deg", "position", "rel_size"))?;
            for r in &result.errors {
                say(
                    disp,
                    out,
                    format!(
                        "{:<12} {:>12} {:>12} {:>12}",
                        r.object_id,
                        sig4(r.rotation_deg),
                        sig4(r.position),
                        sig4(r.relative_size)
                    ),
                )?;
            }
        }
    }
    Ok(Exit::Ok)
}

/// Largest component error over `cases` random codec round trips.
pub fn codec_round_trip_error(cases: usize, seed: u64) -> Result<f64, CliError> {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..cases {
        let l = rng.random_range(1.0..500.0);
        let q = SquareRegion::new(rng.random_range(-500.0..500.0), rng.random_range(-500.0..500.0), l)?;
        let a = l * rng.random_range(0.05..2.0);
        let b = a * rng.random_range(0.05..0.999);
        let theta = std::f64::consts::FRAC_PI_2 - std::f64::consts::PI * rng.random::<f64>();
        let e = Ellipse::new(
            q.x() + l * rng.random_range(-1.0..1.0),
            q.y() + l * rng.random_range(-1.0..1.0),
            a,
            b,
            theta,
        )?;
        let s = VisibilityScale::new(rng.random_range(1e-3..=1.0))?;
        let (back, s_back) = decode_ellipse(&q, &encode_ellipse(&q, &e, s))?;
        let dtheta = {
            let d = (back.theta() - e.theta()).rem_euclid(std::f64::consts::PI);
            d.min(std::f64::consts::PI - d)
        };
        let errs = [
            (back.x() - e.x()).abs(),
            (back.y() - e.y()).abs(),
            (back.a() - e.a()).abs(),
            (back.b() - e.b()).abs(),
            dtheta,
            (s_back.get() - s.get()).abs(),
        ];
        worst = errs.into_iter().fold(worst, f64::max);
    }
    Ok(worst)
}

pub fn cmd_selftest(args: &SelftestArgs, disp: Display, out: &mut dyn Write) -> Result<Exit, CliError> {
    let worst = codec_round_trip_error(args.cases, args.seed)?;
    let ok = worst <= 1e-9;
    say(
        disp,
        out,
        format!(
            "codec round trip: {} cases, max component error {worst:.3e} [{}]",
            args.cases,
            if ok { "PASS" } else { "FAIL" }
        ),
    )?;
    if ok {
        Ok(Exit::Ok)
    } else {
        Err(CliError::Input(format!("codec round trip error {worst:e} exceeds 1e-9")))
    }
}

pub fn cmd_fit(args: &FitArgs, disp: Display, out: &mut dyn Write) -> Result<Exit, CliError> {
    let img = ctx(format!("invalid mask {}", args.mask.display()), read_pgm(open(&args.mask)?))?;
    let mask = img.map(|&v| match args.label {
        Some(l) => v == l,
        None => v != 0,
    });
    let grid = GridSpec::new(0.0, 0.0, 1.0, img.cols(), img.rows())?;
    let e = mvee(&mask_to_points(&mask, &grid)?, args.tol, args.max_iter)?;
    #[derive(Serialize)]
    struct FitOut {
        x: f64,
        y: f64,
        a: f64,
        b: f64,
        theta: f64,
    }
    let json = ctx(
        "cannot serialize",
        serde_json::to_string(&FitOut {
            x: e.x(),
            y: e.y(),
            a: e.a(),
            b: e.b(),
            theta: e.theta(),
        }),
    )?;
    ctx("cannot write to stdout", writeln!(out, "{json}"))?;
    if disp.degrees && !disp.quiet {
        say(disp, out, format!("theta {}", disp.angle(e.theta())))?;
    }
    Ok(Exit::Ok)
}

fn svg_ellipse(e: &Ellipse<f64>, style: &str) -> String {
    format!(
        r#"<ellipse cx="{:.3}" cy="{:.3}" rx="{:.3}" ry="{:.3}" transform="rotate({:.3} {:.3} {:.3})" {style}/>"#,
        e.x(),
        e.y(),
        e.a(),
        e.b(),
        e.theta().to_degrees(),
        e.x(),
        e.y()
    )
}

pub fn cmd_svg(args: &SvgArgs, disp: Display, out: &mut dyn Write) -> Result<Exit, CliError> {
    let mut body = Vec::new();
    if let Some(p) = &args.gt {
        for g in ctx(format!("invalid ground truth {}", p.display()), read_annotations(open(p)?))? {
            if g.image_id != args.image_id {
                continue;
            }
            if let Some(b) = g.visible_box {
                body.push(format!(
                    r#"<rect x="{:.3}" y="{:.3}" width="{:.3}" height="{:.3}" fill="none" stroke="gray" stroke-dasharray="2"/>"#,
                    b.x_min(),
                    b.y_min(),
                    b.w(),
                    b.h()
                ));
            }
            body.push(svg_ellipse(&g.ellipse, r#"fill="none" stroke="green""#));
        }
    }
    if let Some(p) = &args.det {
        for d in ctx(format!("invalid detections {}", p.display()), read_detections(open(p)?))? {
            if d.image_id == args.image_id && d.score >= args.min_score {
                body.push(svg_ellipse(&d.ellipse, r#"fill="none" stroke="red""#));
            }
        }
    }
    let n = body.len();
    let svg = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n<rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>\n{}\n</svg>\n",
        body.join("\n"),
        w = args.width,
        h = args.height
    );
    let mut w = create(&args.out)?;
    ctx("cannot write svg", w.write_all(svg.as_bytes()).and_then(|_| w.flush()))?;
    say(disp, out, format!("drew {n} shape(s) to {}", args.out.display()))?;
    Ok(Exit::Ok)
}
