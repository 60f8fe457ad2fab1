//! `memovis`: headless driver for index builds, view suggestions, modifier
//! runs, memo export and the review service.
//!
//! Output is JSON lines on stdout. Failures print one line on stderr,
//! `error[validation]: ...` or `error[runtime]: ...`, and exit with 1 or 2.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand};
use memovis_core::adapters::ModelSuite;
use memovis_core::compositor::{ModifierKind, ModifierResult};
use memovis_core::scene::load_scene;
use memovis_core::viewpoint::{SamplingConfig, ViewpointIndex};
use memovis_core::Viewpoint;
use memovis_service::{App, ConfigError, OpError, ServiceConfig, ServiceError};
use memovis_service::ops::{self, ModifierRequest};
use serde_json::json;

#[derive(Parser)]
#[command(name = "memovis", version, about = "Viewpoint-anchored 3D design review")]
struct Cli {
    /// Service config file (TOML); its viewport, endpoints and defaults apply.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Use the deterministic mock models whatever the config says.
    #[arg(long, global = true)]
    mock: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render and encode the viewpoint grid of a scene into an index file.
    Index {
        scene: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Target bins per axis.
        #[arg(long)]
        bins: Option<u32>,
        /// Angle step in degrees; must divide 180.
        #[arg(long)]
        step: Option<u32>,
        /// Comma-separated radii, in multiples of the scene radius.
        #[arg(long, value_delimiter = ',')]
        radii: Option<Vec<f64>>,
        /// Square render size in pixels.
        #[arg(long)]
        render_size: Option<u32>,
    },
    /// Top-k viewpoints of an index for a comment text.
    Suggest {
        index: PathBuf,
        #[arg(long)]
        text: String,
        #[arg(long)]
        k: Option<usize>,
    },
    /// Run one modifier pipeline and write its result files.
    Modify {
        scene: PathBuf,
        /// Index of the scene; required for `--viewpoint row:N`.
        index: Option<PathBuf>,
        #[arg(long)]
        comment_text: String,
        /// Anchored viewpoint as JSON, or `row:N` to take row N of the index.
        #[arg(long)]
        viewpoint: Option<String>,
        #[arg(long, value_parser = parse_kind)]
        kind: ModifierKind,
        /// JSON file with the modifier payload (strokes, box, intent, prompt, seed).
        #[arg(long)]
        payload: Option<PathBuf>,
        /// Directory of an earlier result to build on.
        #[arg(long)]
        prior: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        render_size: Option<u32>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write the memo archive of a stored comment. Run it while the service is stopped.
    Export {
        #[arg(long)]
        comment: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the review service.
    Serve {
        #[arg(long)]
        port: Option<u16>,
    },
}

fn parse_kind(s: &str) -> Result<ModifierKind, String> {
    [ModifierKind::TextScribble, ModifierKind::GrabNGo, ModifierKind::TextPaint]
        .into_iter()
        .find(|k| k.as_str() == s)
        .ok_or_else(|| format!("unknown kind {s:?}; expected text-scribble, grab-n-go or text-paint"))
}

/// A failure caused by the invocation rather than the environment.
#[derive(Debug)]
struct Invalid(String);

impl std::fmt::Display for Invalid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Invalid {}

fn invalid(msg: impl Into<String>) -> anyhow::Error {
    Invalid(msg.into()).into()
}

fn is_validation(err: &anyhow::Error) -> bool {
    err.chain().any(|e| {
        e.is::<Invalid>()
            || e.is::<ConfigError>()
            || e.downcast_ref::<OpError>().is_some_and(OpError::is_validation)
            || e.downcast_ref::<ServiceError>().is_some_and(|s| {
                matches!(
                    s,
                    ServiceError::Validation(_) | ServiceError::NotFound(_) | ServiceError::Config(_)
                )
            })
    })
}

fn load_config(cli: &Cli) -> Result<ServiceConfig> {
    let cfg = match &cli.config {
        Some(path) => ServiceConfig::load(path)?,
        None => {
            let mut cfg = ServiceConfig::default();
            cfg.apply_env(std::env::vars())?;
            cfg.validate()?;
            cfg
        }
    };
    Ok(cfg)
}

fn models(cli: &Cli, cfg: &ServiceConfig) -> Result<ModelSuite> {
    if cli.mock {
        Ok(ModelSuite::mock())
    } else {
        Ok(cfg.build_models()?)
    }
}

fn with_render_size(cfg: &mut ServiceConfig, size: Option<u32>) -> Result<()> {
    if let Some(s) = size {
        cfg.viewport = cfg.viewport.clone().with_size(s, s);
        cfg.viewport
            .validate()
            .map_err(|e| invalid(format!("--render-size: {e}")))?;
    }
    Ok(())
}

fn print(line: serde_json::Value) {
    println!("{line}");
}

fn cmd_index(
    cli: &Cli,
    scene: &Path,
    out: &Path,
    bins: Option<u32>,
    step: Option<u32>,
    radii: Option<Vec<f64>>,
    render_size: Option<u32>,
) -> Result<()> {
    let mut cfg = load_config(cli)?;
    with_render_size(&mut cfg, render_size)?;
    let sampling = SamplingConfig {
        bins_per_axis: bins.unwrap_or(cfg.sampling.bins_per_axis),
        angle_step_deg: step.unwrap_or(cfg.sampling.angle_step_deg),
        radii: radii.unwrap_or_else(|| cfg.sampling.radii.clone()),
    };
    sampling.validate().map_err(|e| invalid(e.to_string()))?;
    let models = models(cli, &cfg)?;
    let scene = load_scene(scene).map_err(OpError::from)?;
    let start = Instant::now();
    let index = ops::build_scene_index(&scene, &sampling, &cfg, &models, None)?;
    let seconds = start.elapsed().as_secs_f64();
    index.write(out).map_err(OpError::from).map_err(|e| anyhow!("writing index: {e}"))?;
    print(json!({
        "rows": index.len(),
        "dim": index.dim(),
        "fingerprint": scene.fingerprint_hex(),
        "seconds": seconds,
        "out": out,
    }));
    Ok(())
}

fn cmd_suggest(cli: &Cli, index: &Path, text: &str, k: Option<usize>) -> Result<()> {
    if text.trim().is_empty() {
        return Err(invalid("--text must not be empty"));
    }
    let cfg = load_config(cli)?;
    let models = models(cli, &cfg)?;
    let index = ViewpointIndex::read(index).map_err(OpError::from)?;
    let k = k.unwrap_or(cfg.k);
    for (rank, s) in ops::suggest(&index, text, k, &models)?.into_iter().enumerate() {
        print(json!({
            "rank": rank + 1,
            "row": s.row,
            "score": s.score,
            "viewpoint": s.viewpoint,
        }));
    }
    Ok(())
}

fn parse_viewpoint(spec: &str, index: Option<&Path>) -> Result<Viewpoint> {
    if let Some(row) = spec.strip_prefix("row:") {
        let row: usize = row
            .trim()
            .parse()
            .map_err(|_| invalid(format!("--viewpoint {spec:?}: bad row number")))?;
        let path = index.ok_or_else(|| invalid("--viewpoint row:N needs the index argument"))?;
        let index = ViewpointIndex::read(path).map_err(OpError::from)?;
        if row >= index.len() {
            bail!(Invalid(format!("--viewpoint row {row} is outside the index ({} rows)", index.len())));
        }
        return Ok(index.viewpoint(row));
    }
    let v: Viewpoint = serde_json::from_str(spec).map_err(|e| invalid(format!("--viewpoint: {e}")))?;
    v.validate().map_err(|e| invalid(format!("--viewpoint: {e}")))?;
    Ok(v)
}

#[allow(clippy::too_many_arguments)]
fn cmd_modify(
    cli: &Cli,
    scene_path: &Path,
    index: Option<&Path>,
    comment_text: &str,
    viewpoint: Option<&str>,
    kind: ModifierKind,
    payload: Option<&Path>,
    prior: Option<&Path>,
    seed: Option<u64>,
    render_size: Option<u32>,
    out: &Path,
) -> Result<()> {
    let viewpoint = viewpoint.ok_or_else(|| {
        invalid("an anchored viewpoint is required: pass --viewpoint with viewpoint JSON or row:N")
    })?;
    let mut cfg = load_config(cli)?;
    with_render_size(&mut cfg, render_size)?;
    let models = models(cli, &cfg)?;
    let scene = Arc::new(load_scene(scene_path).map_err(OpError::from)?);
    if let Some(path) = index {
        ViewpointIndex::read(path)
            .and_then(|i| i.check_scene(&scene))
            .map_err(OpError::from)
            .with_context(|| format!("{}", path.display()))?;
    }
    let anchor = parse_viewpoint(viewpoint, index)?;
    let payload = match payload {
        Some(path) => {
            let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
            serde_json::from_slice(&bytes).map_err(|e| invalid(format!("{}: {e}", path.display())))?
        }
        None => serde_json::Value::Null,
    };
    let mut request = ModifierRequest::from_payload(kind, payload)?;
    if let Some(s) = seed {
        match &mut request {
            ModifierRequest::TextScribble { seed, .. } | ModifierRequest::TextPaint { seed, .. } => {
                *seed = Some(s)
            }
            ModifierRequest::GrabNGo { .. } => {}
        }
    }
    let prior = match prior {
        Some(dir) => Some(
            ModifierResult::read_dir(dir)
                .map_err(|e| invalid(format!("--prior {}: {e}", dir.display())))?,
        ),
        None => None,
    };
    let session = ops::modifier_session(scene, anchor, &cfg, models)?;
    let result = ops::run_modifier(&session, &request, prior.as_ref(), comment_text, &cfg)?;
    result
        .write_dir(out)
        .with_context(|| format!("writing {}", out.display()))?;
    print(json!({
        "out": out,
        "kind": result.kind(),
        "seed": result.provenance.seed,
        "no_object": result.provenance.no_object,
        "removed_meshes": result.removed_meshes,
        "selected_pixels": result.seg.count(),
    }));
    Ok(())
}

fn cmd_export(cli: &Cli, comment: &str, out: &Path) -> Result<()> {
    let mut cfg = load_config(cli)?;
    cfg.workers = 1;
    let app = App::start(cfg, ModelSuite::mock())?;
    let bytes = app.service().export_memo(comment)?;
    fs::write(out, &bytes).with_context(|| format!("writing {}", out.display()))?;
    print(json!({"out": out, "bytes": bytes.len()}));
    Ok(())
}

fn cmd_serve(cli: &Cli, port: Option<u16>) -> Result<()> {
    let mut cfg = load_config(cli)?;
    if let Some(p) = port {
        cfg.port = p;
    }
    let models = models(cli, &cfg)?;
    print(json!({"listening": format!("http://{}:{}", cfg.bind, cfg.port), "data_dir": cfg.data_dir}));
    memovis_service::serve(cfg, models)?;
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Index { scene, out, bins, step, radii, render_size } => {
            cmd_index(cli, scene, out, *bins, *step, radii.clone(), *render_size)
        }
        Command::Suggest { index, text, k } => cmd_suggest(cli, index, text, *k),
        Command::Modify {
            scene,
            index,
            comment_text,
            viewpoint,
            kind,
            payload,
            prior,
            seed,
            render_size,
            out,
        } => cmd_modify(
            cli,
            scene,
            index.as_deref(),
            comment_text,
            viewpoint.as_deref(),
            *kind,
            payload.as_deref(),
            prior.as_deref(),
            *seed,
            *render_size,
            out,
        ),
        Command::Export { comment, out } => cmd_export(cli, comment, out),
        Command::Serve { port } => cmd_serve(cli, *port),
    }
}

/// The error chain joined with ": ", skipping causes whose text the
/// outer message already includes.
fn describe(err: &anyhow::Error) -> String {
    let mut out = String::new();
    for cause in err.chain() {
        let msg = cause.to_string();
        if out.is_empty() {
            out = msg;
        } else if !out.contains(&msg) {
            out = format!("{out}: {msg}");
        }
    }
    out
}

fn one_line(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let text = e.render().to_string();
            let first = text.lines().next().unwrap_or_default();
            let msg = first.strip_prefix("error: ").unwrap_or(first);
            eprintln!("error[validation]: {}", one_line(msg));
            return ExitCode::from(1);
        }
    };
    let default_level = if matches!(cli.command, Command::Serve { .. }) { "info" } else { "warn" };
    tracing_subscriber::fmt()
        .with_writer(std::io::stderr)
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env()
                .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new(default_level)),
        )
        .init();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let (tag, code) = if is_validation(&e) { ("validation", 1) } else { ("runtime", 2) };
            eprintln!("error[{tag}]: {}", one_line(&describe(&e)));
            ExitCode::from(code)
        }
    }
}
