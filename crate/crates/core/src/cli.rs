//! Command-line front end. Human-readable progress goes to standard error,
//! machine-readable results to files and standard output.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use log::info;

use crate::completion::complete_background;
use crate::error::{Error, Result};
use crate::evaluation::{
    evaluate_dirs, read_ranges, read_report, video_dir, EvalOptions, LabelScheme, RangeEntry, Report, VideoResult,
};
use crate::flow::{estimate_flow, FlowParams};
use crate::imaging::io::{
    ensure_dir, list_indices, load_mask, load_sequence, save_frame, save_mask, FrameTemplate, DEFAULT_GT_TEMPLATE,
    DEFAULT_INPUT_TEMPLATE, DEFAULT_MASK_TEMPLATE,
};
use crate::imaging::{resize_bilinear, to_gray, FrameSequence};
use crate::pipeline::{run_video, write_run, Pipeline, PipelineConfig, SegmenterChoice};
use crate::synth::{generate, SceneKind, SceneSpec};

#[derive(Debug, Parser)]
#[command(name = "bmc", version, about = "Moving-camera saliency detection by background model completion")]
pub struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Log more (repeat for debug output).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build the initial empty background from the first frames of a video.
    InitBg(InitBgArgs),
    /// Detect foreground in every frame and write masks plus a manifest.
    Run(RunArgs),
    /// Score predicted masks against ground truth.
    Eval(EvalArgs),
    /// Estimate optical flow between two frames and write a .flo file.
    Flow(FlowArgs),
    /// Complete the last frame of a window given foreground masks.
    Complete(CompleteArgs),
    /// Generate a synthetic sequence with ground truth and clean plates.
    Synth(SynthArgs),
    /// Merge evaluation reports and print the combined table.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct InputArgs {
    /// Directory of numbered input frames.
    pub input: PathBuf,
    /// Input file name template; tries in%06d.jpg, then in%06d.png.
    #[arg(long)]
    pub input_template: Option<String>,
    /// First frame index to load.
    #[arg(long)]
    pub first: Option<u32>,
    /// Last frame index to load (inclusive).
    #[arg(long)]
    pub last: Option<u32>,
}

/// Overrides for the top-level config keys. A flag beats the config file,
/// which beats the built-in default.
#[derive(Debug, Default, Args)]
pub struct ConfigFlags {
    /// TOML config file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Frames used to build the first background [config default: 100].
    #[arg(long)]
    pub init_window: Option<usize>,
    /// Frames between scheduled refreshes, 0 disables [config default: 100].
    #[arg(long)]
    pub section_length: Option<usize>,
    /// Processing width [config default: 320].
    #[arg(long)]
    pub canonical_width: Option<usize>,
    /// Processing height [config default: 240].
    #[arg(long)]
    pub canonical_height: Option<usize>,
    /// Foreground ratio that triggers an early refresh [config default: 0.5].
    #[arg(long)]
    pub deterioration_fg_ratio: Option<f64>,
    /// Frames averaged by the early-refresh trigger [config default: 10].
    #[arg(long)]
    pub deterioration_window: Option<usize>,
    /// network or differencing [config default: differencing].
    #[arg(long)]
    pub segmenter: Option<SegmenterChoice>,
    /// Weights file for the network segmenter [config default: none].
    #[arg(long)]
    pub weights: Option<PathBuf>,
    /// Probability threshold of the network segmenter [config default: 0.5].
    #[arg(long)]
    pub threshold: Option<f32>,
    /// Gray-level threshold of the differencing segmenter [config default: 30].
    #[arg(long)]
    pub diff_threshold: Option<u8>,
    /// Smallest blob kept by the differencing segmenter [config default: 50].
    #[arg(long)]
    pub min_blob: Option<usize>,
    /// Frames in the recent-background median [config default: 30].
    #[arg(long)]
    pub recent_window: Option<usize>,
    /// Mask growth before completion, in pixels [config default: 2].
    #[arg(long)]
    pub mask_dilation: Option<usize>,
    /// Ghost suppression during initialization [config default: true].
    #[arg(long)]
    pub ghost_suppression: Option<bool>,
    /// Frames per completion window [config default: 100].
    #[arg(long)]
    pub completion_window: Option<usize>,
}

impl ConfigFlags {
    pub fn resolve(&self) -> Result<PipelineConfig> {
        let mut cfg = match &self.config {
            Some(path) => PipelineConfig::load(path)?,
            None => PipelineConfig::default(),
        };
        macro_rules! set {
            ($($flag:ident => $($field:ident).+),* $(,)?) => {
                $(if let Some(v) = self.$flag.clone() { cfg.$($field).+ = v; })*
            };
        }
        set!(
            init_window => init_window,
            section_length => section_length,
            canonical_width => canonical_width,
            canonical_height => canonical_height,
            deterioration_fg_ratio => deterioration_fg_ratio,
            deterioration_window => deterioration_window,
            segmenter => segmenter,
            threshold => threshold,
            diff_threshold => differencing.threshold,
            min_blob => differencing.min_blob,
            recent_window => recent_window,
            mask_dilation => mask_dilation,
            ghost_suppression => ghost_suppression,
            completion_window => completion.window,
        );
        if let Some(w) = &self.weights {
            cfg.weights = Some(w.clone());
        }
        if self.completion_window.is_none() && self.init_window.is_some() {
            cfg.completion.window = cfg.completion.window.min(cfg.init_window);
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Args)]
pub struct InitBgArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Frames in the initialization window (overrides --init-window).
    #[arg(long)]
    pub frames: Option<usize>,
    /// Output PNG; the provenance map goes next to it as <stem>.provenance.png.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub cfg: ConfigFlags,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Output directory for masks and manifest.json.
    #[arg(long)]
    pub out: PathBuf,
    /// Mask file name template.
    #[arg(long, default_value = DEFAULT_MASK_TEMPLATE)]
    pub mask_template: String,
    /// Also write network probabilities as <mask>.prob.png.
    #[arg(long)]
    pub probabilities: bool,
    /// Write the empty background after every refresh as bg<index>.png.
    #[arg(long)]
    pub backgrounds: bool,
    #[command(flatten)]
    pub cfg: ConfigFlags,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Prediction directory (or root of per-video directories with --range).
    pub pred: PathBuf,
    /// Ground-truth directory (or root of per-video directories with --range).
    pub gt: PathBuf,
    /// CSV of annotated ranges: category,video,first,last.
    #[arg(long)]
    pub range: Option<PathBuf>,
    /// Video name when no range file is given.
    #[arg(long)]
    pub video: Option<String>,
    /// Category name when no range file is given.
    #[arg(long, default_value = "all")]
    pub category: String,
    /// First ground-truth index to count.
    #[arg(long)]
    pub first: Option<u32>,
    /// Last ground-truth index to count (inclusive).
    #[arg(long)]
    pub last: Option<u32>,
    /// Report path stem; writes <stem>.csv and <stem>.json.
    #[arg(long)]
    pub out: PathBuf,
    /// Count frames the run manifest marks as warm-up.
    #[arg(long)]
    pub include_warm_up: bool,
    /// Ground truth is plain 0/255 with no ignored labels.
    #[arg(long)]
    pub binary_gt: bool,
    /// Compare at WxH instead of the ground-truth size.
    #[arg(long, value_parser = parse_size)]
    pub resize: Option<(usize, usize)>,
    #[arg(long, default_value = DEFAULT_MASK_TEMPLATE)]
    pub pred_template: String,
    #[arg(long, default_value = DEFAULT_GT_TEMPLATE)]
    pub gt_template: String,
}

#[derive(Debug, Args)]
pub struct FlowArgs {
    /// Directory of numbered input frames.
    pub input: PathBuf,
    #[arg(long)]
    pub input_template: Option<String>,
    /// Source frame index.
    #[arg(long)]
    pub from: u32,
    /// Target frame index.
    #[arg(long)]
    pub to: u32,
    /// Output .flo file.
    #[arg(long)]
    pub out: PathBuf,
    /// Resize both frames to WxH first [default: keep size].
    #[arg(long, value_parser = parse_size)]
    pub resize: Option<(usize, usize)>,
    /// Pyramid levels.
    #[arg(long, default_value_t = FlowParams::default().levels)]
    pub levels: usize,
    /// Warp iterations per level.
    #[arg(long, default_value_t = FlowParams::default().iterations)]
    pub iterations: usize,
    /// Smoothness weight.
    #[arg(long, default_value_t = FlowParams::default().regularization)]
    pub regularization: f32,
}

#[derive(Debug, Args)]
pub struct CompleteArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Directory of foreground masks, one per input frame.
    #[arg(long)]
    pub masks: PathBuf,
    #[arg(long, default_value = DEFAULT_MASK_TEMPLATE)]
    pub mask_template: String,
    /// Output PNG; the provenance map goes next to it as <stem>.provenance.png.
    #[arg(long)]
    pub out: PathBuf,
    /// Config file for the completion settings.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// static, pan or static-ghost.
    #[arg(long, default_value = "pan")]
    pub scene: SceneKind,
    /// Frames [default: 250, or 100 for static-ghost].
    #[arg(long)]
    pub length: Option<usize>,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    /// Camera pan in px/frame (pan scene).
    #[arg(long, default_value_t = 1)]
    pub speed: i32,
    #[arg(long, default_value_t = 320)]
    pub width: usize,
    #[arg(long, default_value_t = 240)]
    pub height: usize,
    /// Object side [default: 20, or 40 for static-ghost].
    #[arg(long)]
    pub object_size: Option<usize>,
    /// Frames with the parked object (static-ghost).
    #[arg(long, default_value_t = 80)]
    pub parked_frames: usize,
    /// Output directory: input/, groundtruth/, plates/ and scene.json.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Reports written by eval (.csv or .json).
    #[arg(required = true)]
    pub reports: Vec<PathBuf>,
    /// Path stem of the merged report.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn parse_size(s: &str) -> std::result::Result<(usize, usize), String> {
    let (w, h) = s.split_once(['x', 'X']).ok_or_else(|| format!("expected WxH, got {s:?}"))?;
    let parse = |v: &str| v.trim().parse::<usize>().map_err(|e| format!("{v:?}: {e}"));
    let (w, h) = (parse(w)?, parse(h)?);
    if w == 0 || h == 0 {
        return Err("size must be positive".into());
    }
    Ok((w, h))
}

/// Template given, else the first default that matches files in `dir`.
fn input_template(dir: &Path, given: &Option<String>) -> Result<String> {
    if let Some(t) = given {
        return Ok(t.clone());
    }
    if !dir.is_dir() {
        return Err(Error::UnreadableFile {
            path: dir.to_path_buf(),
            reason: "not a directory".into(),
        });
    }
    for t in [DEFAULT_INPUT_TEMPLATE, "in%06d.png"] {
        if !list_indices(dir, &FrameTemplate::parse(t)?)?.is_empty() {
            return Ok(t.to_string());
        }
    }
    Ok(DEFAULT_INPUT_TEMPLATE.to_string())
}

fn load_input(a: &InputArgs) -> Result<FrameSequence> {
    let template = input_template(&a.input, &a.input_template)?;
    let range = match (a.first, a.last) {
        (None, None) => None,
        (first, last) => {
            let avail = list_indices(&a.input, &FrameTemplate::parse(&template)?)?;
            let lo = first.or(avail.first().copied()).unwrap_or(0);
            let hi = last.or(avail.last().copied()).unwrap_or(0);
            Some((lo, hi))
        }
    };
    let seq = load_sequence(&a.input, &template, range)?;
    info!("loaded {} frames from {}", seq.len(), a.input.display());
    Ok(seq)
}

fn sibling(out: &Path, suffix: &str) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    out.with_file_name(format!("{stem}.{suffix}.png"))
}

fn parent_dir(path: &Path) -> Result<()> {
    if let Some(d) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        ensure_dir(d)?;
    }
    Ok(())
}

fn cmd_init_bg(a: &InitBgArgs) -> Result<()> {
    let mut cfg = a.cfg.resolve()?;
    if let Some(n) = a.frames {
        cfg.init_window = n;
        if a.cfg.completion_window.is_none() {
            cfg.completion.window = cfg.completion.window.min(n);
        }
        cfg.validate()?;
    }
    let seq = load_input(&a.input)?;
    let n = cfg.init_window;
    if seq.len() < n {
        return Err(Error::Precondition(format!("need {n} frames, found {}", seq.len())));
    }
    let mut pipeline = Pipeline::new(cfg)?;
    pipeline.initialize(&seq.frames()[..n])?;
    let model = pipeline.model().expect("initialized");
    parent_dir(&a.out)?;
    save_frame(&model.empty_background, &a.out)?;
    save_frame(&model.provenance_image(), &sibling(&a.out, "provenance"))?;
    let s = &model.completion_stats;
    eprintln!(
        "background from {n} frames: {} masked px, {} flows, {} poisson px, {} inpainted px, {} issue(s)",
        s.masked_pixels,
        s.flows_computed,
        s.poisson_pixels,
        s.inpainted_pixels,
        model.issues.len()
    );
    Ok(())
}

fn cmd_run(a: &RunArgs) -> Result<()> {
    let cfg = a.cfg.resolve()?;
    let seq = load_input(&a.input)?;
    let template = FrameTemplate::parse(&a.mask_template)?;
    let out = if a.backgrounds {
        run_with_backgrounds(&seq, &cfg, &a.out)?
    } else {
        run_video(&seq, &cfg)?
    };
    write_run(&a.out, &out.records, &out.manifest, &template, a.probabilities)?;
    eprintln!(
        "{} masks written to {}; refreshes after frames {:?}",
        out.records.len(),
        a.out.display(),
        out.manifest.refresh_indices()
    );
    Ok(())
}

/// [`run_video`] that also saves each new background.
fn run_with_backgrounds(seq: &FrameSequence, cfg: &PipelineConfig, dir: &Path) -> Result<crate::pipeline::RunOutput> {
    ensure_dir(dir)?;
    let n = cfg.init_window;
    if seq.len() <= n {
        return Err(Error::Precondition(format!(
            "video has {} frames, needs more than init_window = {n}",
            seq.len()
        )));
    }
    let mut p = Pipeline::new(cfg.clone())?;
    let mut records = p.initialize(&seq.frames()[..n])?;
    let save = |p: &Pipeline, idx: u32| -> Result<()> {
        save_frame(&p.model().expect("initialized").empty_background, &dir.join(format!("bg{idx:06}.png")))
    };
    save(&p, seq.indices()[n - 1])?;
    for (k, f) in seq.frames()[n..].iter().enumerate() {
        let r = p.process(f)?;
        if r.bg_refreshed && r.refresh_error.is_none() {
            save(&p, seq.indices()[n + k])?;
        }
        records.push(r);
    }
    for (r, &idx) in records.iter_mut().zip(seq.indices()) {
        r.source_index = idx;
    }
    let manifest = crate::pipeline::RunManifest::new(seq, p.config(), &records);
    Ok(crate::pipeline::RunOutput { records, manifest })
}

fn cmd_eval(a: &EvalArgs) -> Result<()> {
    let mut opts = EvalOptions {
        pred_template: FrameTemplate::parse(&a.pred_template)?,
        gt_template: FrameTemplate::parse(&a.gt_template)?,
        labels: if a.binary_gt {
            LabelScheme::binary()
        } else {
            LabelScheme::default()
        },
        include_warm_up: a.include_warm_up,
        resize: a.resize,
        range: None,
    };
    let entries: Vec<RangeEntry> = match &a.range {
        Some(path) => read_ranges(path)?,
        None => {
            let video = a.video.clone().unwrap_or_else(|| {
                a.pred
                    .file_name()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_else(|| "video".into())
            });
            vec![RangeEntry {
                category: a.category.clone(),
                video,
                first: a.first.unwrap_or(0),
                last: a.last.unwrap_or(u32::MAX),
            }]
        }
    };
    if entries.is_empty() {
        return Err(Error::Precondition("range file lists no videos".into()));
    }
    let mut results = Vec::with_capacity(entries.len());
    for e in &entries {
        let (pred, gt) = if a.range.is_some() {
            (video_dir(&a.pred, &e.video), video_dir(&a.gt, &e.video))
        } else {
            (a.pred.clone(), a.gt.clone())
        };
        opts.range = Some((a.first.unwrap_or(e.first).max(e.first), a.last.unwrap_or(e.last).min(e.last)));
        let vc = evaluate_dirs(&pred, &gt, &opts)?;
        if vc.frames == 0 {
            return Err(Error::Precondition(format!("no ground-truth frames to evaluate for {}", e.video)));
        }
        info!("{}: {} frames", e.video, vc.frames);
        results.push(VideoResult::new(&e.video, &e.category, vc.frames, vc.counts));
    }
    finish_report(Report::build(results)?, Some(&a.out))
}

fn finish_report(report: Report, out: Option<&Path>) -> Result<()> {
    if let Some(stem) = out {
        report.write(stem)?;
        eprintln!("report written to {}.{{csv,json}}", stem.display());
    }
    eprint!("{}", report.to_table());
    // Summary row on standard output, same columns as the CSV.
    let rows = report.rows();
    let summary = rows.last().expect("report has overall rows");
    let mut w = csv::Writer::from_writer(std::io::stdout());
    w.serialize(summary)?;
    w.flush()?;
    Ok(())
}

fn cmd_report(a: &ReportArgs) -> Result<()> {
    let mut videos = Vec::new();
    for path in &a.reports {
        videos.extend(read_report(path)?.videos);
    }
    finish_report(Report::build(videos)?, a.out.as_deref())
}

fn cmd_flow(a: &FlowArgs) -> Result<()> {
    if a.from == a.to {
        return Err(Error::Precondition("flow needs two different frames".into()));
    }
    let template = input_template(&a.input, &a.input_template)?;
    let t = FrameTemplate::parse(&template)?;
    let available = list_indices(&a.input, &t)?;
    for i in [a.from, a.to] {
        if available.binary_search(&i).is_err() {
            return Err(Error::Precondition(format!(
                "frame {i} is not in {} ({} frames)",
                a.input.display(),
                available.len()
            )));
        }
    }
    let load = |i: u32| -> Result<crate::imaging::FloatFrame> {
        let f = crate::imaging::io::load_frame(&a.input.join(t.format(i)))?;
        let f = match a.resize {
            Some((w, h)) => resize_bilinear(&f, w, h)?,
            None => f,
        };
        Ok(to_gray(&f)?.to_float())
    };
    let params = FlowParams {
        levels: a.levels,
        iterations: a.iterations,
        regularization: a.regularization,
        ..FlowParams::default()
    };
    let flow = estimate_flow(&load(a.from)?, &load(a.to)?, &params)?;
    parent_dir(&a.out)?;
    flow.write_flo(&a.out)?;
    eprintln!("flow {} -> {} written to {}", a.from, a.to, a.out.display());
    Ok(())
}

fn cmd_complete(a: &CompleteArgs) -> Result<()> {
    let cfg = match &a.config {
        Some(p) => PipelineConfig::load(p)?.completion,
        None => Default::default(),
    };
    let seq = load_input(&a.input)?;
    let mt = FrameTemplate::parse(&a.mask_template)?;
    let masks = seq
        .indices()
        .iter()
        .map(|&i| {
            let path = a.masks.join(mt.format(i));
            if !path.exists() {
                return Err(Error::MissingFrame {
                    dir: a.masks.clone(),
                    index: i,
                });
            }
            load_mask(&path)
        })
        .collect::<Result<Vec<_>>>()?;
    let done = complete_background(&seq, &masks, &cfg)?;
    parent_dir(&a.out)?;
    save_frame(&done.frame, &a.out)?;
    save_frame(&done.provenance_image(), &sibling(&a.out, "provenance"))?;
    eprintln!(
        "completed frame {} from {} frames: {} masked px, {} issue(s)",
        seq.indices().last().copied().unwrap_or(0),
        seq.len(),
        done.stats.masked_pixels,
        done.issues.len()
    );
    Ok(())
}

fn cmd_synth(a: &SynthArgs) -> Result<()> {
    let base = SceneSpec::new(a.scene);
    let spec = SceneSpec {
        width: a.width,
        height: a.height,
        length: a.length.unwrap_or(base.length),
        seed: a.seed,
        speed: a.speed,
        object_size: a.object_size.unwrap_or(base.object_size),
        parked_frames: a.parked_frames,
        ..base
    };
    if spec.length == 0 {
        return Err(Error::Precondition("length must be positive".into()));
    }
    let scene = generate(&spec);
    let input = ensure_dir(&a.out.join("input"))?;
    let gt = ensure_dir(&a.out.join("groundtruth"))?;
    let plates = ensure_dir(&a.out.join("plates"))?;
    for (i, ((f, m), p)) in scene.frames.iter().zip(&scene.ground_truth).zip(&scene.plates).enumerate() {
        save_frame(f, &input.join(format!("in{i:06}.png")))?;
        save_mask(m, &gt.join(format!("gt{i:06}.png")))?;
        save_frame(p, &plates.join(format!("plate{i:06}.png")))?;
    }
    std::fs::write(a.out.join("scene.json"), serde_json::to_string_pretty(&spec)?)?;
    eprintln!("{} frames written to {}", spec.length, a.out.display());
    Ok(())
}

pub fn execute(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::InitBg(a) => cmd_init_bg(a),
        Command::Run(a) => cmd_run(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Flow(a) => cmd_flow(a),
        Command::Complete(a) => cmd_complete(a),
        Command::Synth(a) => cmd_synth(a),
        Command::Report(a) => cmd_report(a),
    }
}

/// Parse, run and map the outcome to a process exit code: 0 success,
/// 2 I/O, 3 numeric failure, 4 precondition or usage, 5 data mismatch.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 4 } else { 0 };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .try_init();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return 4;
        }
    }
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
