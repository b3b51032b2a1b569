//! `pafbox` command-line front end.
//!
//! Exit codes: 0 ok, 2 I/O, 3 malformed bundle, 4 skeleton mismatch,
//! 5 schema violation, 6 render input.

mod config;

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

pub use config::RunConfig;

use crate::assemble::{parse_poses, AssembledPose, Matcher, PipelineParams};
use crate::boxes::{expand_boxes, BBox};
use crate::bundle::{read_bundle, write_bundle, Scene};
use crate::detect::detect_all;
use crate::error::Error;
use crate::eval::{metric_report, EvalImage, GroundTruth, Prediction};
use crate::geometry::Point2;
use crate::render::{render_svg, Figure, Quiver};
use crate::scene::scene_fixture;
use crate::skeleton::Skeleton;
use crate::synth::PersonPose;

pub const EXIT_IO: i32 = 2;
pub const EXIT_BUNDLE: i32 = 3;
pub const EXIT_SKELETON: i32 = 4;
pub const EXIT_SCHEMA: i32 = 5;
pub const EXIT_RENDER: i32 = 6;

#[derive(Debug, Parser)]
#[command(name = "pafbox", version, about = "Bottom-up pose assembly and affinity-driven box expansion")]
pub struct Cli {
    /// JSON run configuration; flags override its values.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Random seed for scene generation.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Print the effective configuration as JSON and exit.
    #[arg(long, global = true)]
    pub dump_config: bool,
    #[command(subcommand)]
    pub command: Option<Command>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic scene and write its fixture bundle.
    Synth(SynthArgs),
    /// Parse poses from a bundle's fields.
    Assemble(AssembleArgs),
    /// Expand person boxes along a bundle's affinity fields.
    Expand(ExpandArgs),
    /// Score predicted poses against ground truth.
    Eval(EvalArgs),
    /// Draw a bundle or a poses file as SVG.
    Render(RenderArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 1)]
    pub people: usize,
    #[arg(long, default_value_t = 0.0)]
    pub occlusion: f64,
    #[arg(long, default_value_t = 368)]
    pub width: usize,
    #[arg(long, default_value_t = 368)]
    pub height: usize,
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct AssembleArgs {
    #[arg(long, value_name = "DIR")]
    pub fields: PathBuf,
    #[arg(long, value_name = "PATH")]
    pub out: PathBuf,
    /// Use greedy highest-score-first limb matching instead of exact assignment.
    #[arg(long)]
    pub greedy: bool,
}

#[derive(Debug, Args)]
pub struct ExpandArgs {
    #[arg(long, value_name = "PATH")]
    pub boxes: PathBuf,
    #[arg(long, value_name = "DIR")]
    pub fields: PathBuf,
    #[arg(long, value_name = "PATH")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Poses JSON, or a JSON array of them (one per image).
    #[arg(long, value_name = "PATH")]
    pub preds: PathBuf,
    /// `scene.json`, or a JSON array of scenes (one per image).
    #[arg(long, value_name = "PATH")]
    pub gts: PathBuf,
    #[arg(long, value_name = "PATH")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
#[command(group(clap::ArgGroup::new("input").required(true).args(["fields", "poses"])))]
pub struct RenderArgs {
    #[arg(long, value_name = "DIR")]
    pub fields: Option<PathBuf>,
    #[arg(long, value_name = "PATH")]
    pub poses: Option<PathBuf>,
    #[arg(long, value_name = "PATH")]
    pub boxes: Option<PathBuf>,
    /// Affinity quiver sampling stride in pixels; 0 disables the quiver.
    #[arg(long, default_value_t = 8)]
    pub quiver_stride: usize,
    #[arg(long)]
    pub width: Option<usize>,
    #[arg(long)]
    pub height: Option<usize>,
    #[arg(long, value_name = "PATH")]
    pub out: PathBuf,
}

/// A failed command: exit code plus message for stderr.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn new(code: i32, message: impl ToString) -> Self {
        Self { code, message: message.to_string() }
    }
}

type CliResult<T> = Result<T, CliError>;

fn with_code(code: i32) -> impl Fn(Error) -> CliError {
    move |e| {
        let code = match e {
            Error::SkeletonMismatch(_) => EXIT_SKELETON,
            _ => code,
        };
        CliError::new(code, e)
    }
}

/// Poses JSON document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PosesDoc {
    pub skeleton: String,
    pub people: Vec<PoseEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoseEntry {
    pub points: Vec<Option<Point2<f64>>>,
    pub scores: Vec<Option<f64>>,
    pub total_score: f64,
}

impl PosesDoc {
    pub fn from_poses(skeleton: &Skeleton, poses: &[AssembledPose<f64>]) -> Self {
        let people = poses
            .iter()
            .map(|p| PoseEntry { points: p.points.clone(), scores: p.scores.clone(), total_score: p.total_score })
            .collect();
        Self { skeleton: skeleton.name().to_string(), people }
    }

    fn predictions(&self, skeleton: &Skeleton) -> crate::Result<Vec<Prediction<f64>>> {
        if self.skeleton != skeleton.name() {
            return Err(Error::SkeletonMismatch(format!(
                "predictions use `{}`, ground truth `{}`",
                self.skeleton,
                skeleton.name()
            )));
        }
        self.people
            .iter()
            .map(|p| {
                let points = p.points.iter().map(|q| q.unwrap_or_default()).collect();
                let visible = p.points.iter().map(Option::is_some).collect();
                Ok(Prediction { pose: PersonPose::new(skeleton, points, visible)?, score: p.total_score })
            })
            .collect()
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum OneOrMany<T> {
    Many(Vec<T>),
    One(T),
}

impl<T> OneOrMany<T> {
    fn into_vec(self) -> Vec<T> {
        match self {
            OneOrMany::Many(v) => v,
            OneOrMany::One(t) => vec![t],
        }
    }
}

fn read_text(path: &Path, missing_code: i32) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| CliError::new(missing_code, format!("{}: {e}", path.display())))
}

fn write_text(path: &Path, text: &str) -> CliResult<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| CliError::new(EXIT_IO, format!("{}: {e}", parent.display())))?;
    }
    fs::write(path, text).map_err(|e| CliError::new(EXIT_IO, format!("{}: {e}", path.display())))
}

fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("serializable") + "\n"
}

fn load_config(cli: &Cli) -> CliResult<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::from_json(&read_text(path, EXIT_IO)?).map_err(|e| CliError::new(EXIT_SCHEMA, e))?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn load_bundle(dir: &Path, cfg: &RunConfig) -> CliResult<(Scene<f64>, crate::FieldSet<f64>)> {
    let (scene, fields) = read_bundle::<f64>(dir).map_err(|e| CliError::new(EXIT_BUNDLE, e))?;
    if scene.skeleton.name() != cfg.skeleton {
        return Err(CliError::new(
            EXIT_SKELETON,
            format!("bundle skeleton `{}` differs from configured `{}`", scene.skeleton.name(), cfg.skeleton),
        ));
    }
    Ok((scene, fields))
}

pub fn cmd_synth(cfg: &RunConfig, args: &SynthArgs) -> CliResult<()> {
    let skeleton = cfg.skeleton().map_err(|e| CliError::new(EXIT_SCHEMA, e))?;
    let poses = scene_fixture::<f64>(cfg.seed, args.people, &skeleton, (args.width, args.height), args.occlusion)
        .map_err(|e| CliError::new(EXIT_SCHEMA, e))?;
    let scene = Scene::new(skeleton, cfg.seed, (args.width, args.height), args.occlusion, cfg.synth(), &poses)
        .map_err(with_code(EXIT_SCHEMA))?;
    let fields = scene.synthesize().map_err(with_code(EXIT_SCHEMA))?;
    write_bundle(&args.out, &scene, &fields).map_err(|e| CliError::new(EXIT_IO, e))
}

pub fn cmd_assemble(cfg: &RunConfig, args: &AssembleArgs) -> CliResult<()> {
    let (scene, fields) = load_bundle(&args.fields, cfg)?;
    let params = PipelineParams {
        nms: cfg.nms,
        integral: cfg.integral,
        matcher: if args.greedy { Matcher::Greedy } else { Matcher::Exact },
        ..Default::default()
    };
    let parse = parse_poses(&fields, &params).map_err(with_code(EXIT_BUNDLE))?;
    write_text(&args.out, &to_json(&PosesDoc::from_poses(&scene.skeleton, &parse.poses)))
}

pub fn cmd_expand(cfg: &RunConfig, args: &ExpandArgs) -> CliResult<()> {
    let boxes: Vec<BBox<f64>> = serde_json::from_str(&read_text(&args.boxes, EXIT_IO)?)
        .map_err(|e| CliError::new(EXIT_SCHEMA, format!("{}: {e}", args.boxes.display())))?;
    for b in &boxes {
        b.validate().map_err(|e| CliError::new(EXIT_SCHEMA, e))?;
    }
    let (_, fields) = load_bundle(&args.fields, cfg)?;
    let candidates = detect_all(&fields.confidences, &cfg.nms).map_err(with_code(EXIT_BUNDLE))?;
    let expanded = expand_boxes(&boxes, &fields, &candidates, &cfg.expand).map_err(with_code(EXIT_SCHEMA))?;
    write_text(&args.out, &to_json(&expanded))
}

pub fn cmd_eval(args: &EvalArgs) -> CliResult<()> {
    fn schema(path: &Path) -> impl Fn(serde_json::Error) -> CliError + '_ {
        move |e| CliError::new(EXIT_SCHEMA, format!("{}: {e}", path.display()))
    }
    let preds: Vec<PosesDoc> = serde_json::from_str::<OneOrMany<PosesDoc>>(&read_text(&args.preds, EXIT_IO)?)
        .map_err(schema(&args.preds))?
        .into_vec();
    let gts: Vec<Scene<f64>> = serde_json::from_str::<OneOrMany<Scene<f64>>>(&read_text(&args.gts, EXIT_IO)?)
        .map_err(schema(&args.gts))?
        .into_vec();
    if preds.len() != gts.len() {
        return Err(CliError::new(
            EXIT_SCHEMA,
            format!("{} prediction images for {} ground-truth images", preds.len(), gts.len()),
        ));
    }
    let Some(skeleton) = gts.first().map(|g| g.skeleton.clone()) else {
        return Err(CliError::new(EXIT_SCHEMA, "no images to evaluate"));
    };
    let mut images = Vec::with_capacity(gts.len());
    for (pred, gt) in preds.iter().zip(&gts) {
        if gt.skeleton != skeleton {
            return Err(CliError::new(EXIT_SKELETON, "ground-truth images use different skeletons"));
        }
        let ground_truth = gt
            .poses()
            .map_err(with_code(EXIT_SCHEMA))?
            .into_iter()
            .zip(&gt.people)
            .map(|(pose, person)| GroundTruth { pose, area: person.area })
            .collect();
        let predictions = pred.predictions(&skeleton).map_err(with_code(EXIT_SCHEMA))?;
        images.push(EvalImage { predictions, ground_truth });
    }
    let report = metric_report(&images, &skeleton).map_err(with_code(EXIT_SCHEMA))?;
    write_text(&args.out, &to_json(&report))
}

pub fn cmd_render(args: &RenderArgs) -> CliResult<()> {
    let bad = |e: String| CliError::new(EXIT_RENDER, e);
    let boxes: Vec<BBox<f64>> = match &args.boxes {
        Some(path) => {
            serde_json::from_str(&read_text(path, EXIT_RENDER)?).map_err(|e| bad(format!("{}: {e}", path.display())))?
        }
        None => Vec::new(),
    };
    let svg = if let Some(dir) = &args.fields {
        let (scene, fields) = read_bundle::<f64>(dir).map_err(|e| bad(e.to_string()))?;
        let poses = scene
            .people
            .iter()
            .map(|p| p.points.iter().zip(&p.visible).map(|(&q, &v)| v.then_some(q)).collect())
            .collect();
        let quiver =
            (args.quiver_stride > 0).then_some(Quiver { fields: &fields.affinities, stride: args.quiver_stride });
        render_svg(&Figure {
            width: args.width.unwrap_or(scene.width),
            height: args.height.unwrap_or(scene.height),
            skeleton: &scene.skeleton,
            poses,
            boxes,
            quiver,
        })
    } else {
        let path = args.poses.as_ref().expect("clap enforces one input");
        let doc: PosesDoc = serde_json::from_str(&read_text(path, EXIT_RENDER)?)
            .map_err(|e| bad(format!("{}: {e}", path.display())))?;
        let skeleton = Skeleton::preset(&doc.skeleton).map_err(|e| bad(e.to_string()))?;
        if let Some(p) = doc.people.iter().find(|p| p.points.len() != skeleton.num_joints()) {
            return Err(bad(format!("pose with {} points for {} joints", p.points.len(), skeleton.num_joints())));
        }
        let (mut max_x, mut max_y) = (0.0f64, 0.0f64);
        for q in doc.people.iter().flat_map(|p| p.points.iter().flatten()) {
            max_x = max_x.max(q.x);
            max_y = max_y.max(q.y);
        }
        for b in &boxes {
            max_x = max_x.max(b.x_max);
            max_y = max_y.max(b.y_max);
        }
        let poses = doc.people.iter().map(|p| p.points.clone()).collect();
        render_svg(&Figure {
            width: args.width.unwrap_or(max_x.ceil() as usize + 10),
            height: args.height.unwrap_or(max_y.ceil() as usize + 10),
            skeleton: &skeleton,
            poses,
            boxes,
            quiver: None,
        })
    };
    write_text(&args.out, &svg)
}

/// Runs the parsed command line; `Ok` carries text for stdout.
pub fn run(cli: &Cli) -> CliResult<Option<String>> {
    let cfg = load_config(cli)?;
    if cli.dump_config {
        return Ok(Some(cfg.to_json() + "\n"));
    }
    match &cli.command {
        Some(Command::Synth(a)) => cmd_synth(&cfg, a)?,
        Some(Command::Assemble(a)) => cmd_assemble(&cfg, a)?,
        Some(Command::Expand(a)) => cmd_expand(&cfg, a)?,
        Some(Command::Eval(a)) => cmd_eval(a)?,
        Some(Command::Render(a)) => cmd_render(a)?,
        None => return Err(CliError::new(EXIT_SCHEMA, "no subcommand given; see --help")),
    }
    Ok(None)
}

/// Parses `args` (program name first) and runs the command in-process.
pub fn run_from<I, A>(args: I) -> CliResult<Option<String>>
where
    I: IntoIterator<Item = A>,
    A: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(args).map_err(|e| CliError::new(EXIT_SCHEMA, e))?;
    run(&cli)
}

/// Entry point for the binary; returns the process exit code.
pub fn main() -> i32 {
    // Usage errors share the schema code; clap's own 2 would read as I/O.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_SCHEMA } else { 0 };
        }
    };
    match run(&cli) {
        Ok(out) => {
            if let Some(text) = out {
                print!("{text}");
            }
            0
        }
        Err(e) => {
            eprintln!("pafbox: {}", e.message);
            e.code
        }
    }
}
