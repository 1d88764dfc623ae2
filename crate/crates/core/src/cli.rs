//! Command-line front end.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use crate::analyzer::{self, Thresholds};
use crate::annotations::{AnnotationSet, CoverageReport};
use crate::appmodel::{ElementId, ElementKind};
use crate::depiction::{self, DepictionConfig};
use crate::diagnostics::Warning;
use crate::merge::assemble_product;
use crate::outputters::{GenerateOptions, OutputterRegistry, TemplateBundle};
use crate::pipeline::{self, PipelineError};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_COVERAGE: i32 = 2;

/// Marks a directory as generated output, which may be replaced wholesale.
pub const OUTPUT_MARKER: &str = ".ecrit-output";

#[derive(Debug, Parser)]
#[command(
    name = "ecrit",
    version,
    about = "Generate user manuals from Eclipse e4 application models"
)]
pub struct Cli {
    /// Machine-readable output on stdout.
    #[arg(long, global = true)]
    pub json: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate the user manual for a model or product definition.
    Generate(GenerateArgs),
    /// Parse, merge and check annotations without generating anything.
    Validate(InputArgs),
    /// Report eligibility and element statistics for models.
    Analyze(AnalyzeArgs),
    /// Set one field of an annotation sidecar.
    Annotate(AnnotateArgs),
    /// Draw the perspective layout images only.
    Depict(DepictArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Canvas {
    pub width: u32,
    pub height: u32,
}

impl FromStr for Canvas {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (w, h) = s
            .split_once(['x', 'X'])
            .ok_or_else(|| format!("`{s}` is not WIDTHxHEIGHT"))?;
        let parse = |v: &str| match v.trim().parse::<u32>() {
            Ok(n) if n > 0 => Ok(n),
            _ => Err(format!("`{s}` is not WIDTHxHEIGHT with positive sizes")),
        };
        Ok(Canvas {
            width: parse(w)?,
            height: parse(h)?,
        })
    }
}

fn fraction(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if (0.0..=1.0).contains(&v) => Ok(v),
        _ => Err(format!("`{s}` is not a number between 0 and 1")),
    }
}

fn positive(s: &str) -> Result<u32, String> {
    match s.parse::<u32>() {
        Ok(v) if v > 0 => Ok(v),
        _ => Err(format!("`{s}` is not a positive integer")),
    }
}

#[derive(Debug, Clone, Args)]
pub struct DepictionArgs {
    /// Depiction canvas size, e.g. 800x600.
    #[arg(long, value_name = "WxH")]
    pub canvas: Option<Canvas>,
    /// Gap between boxes, in pixels.
    #[arg(long)]
    pub margin: Option<u32>,
    #[arg(long, value_parser = positive)]
    pub font_size: Option<u32>,
}

impl DepictionArgs {
    fn config(&self) -> DepictionConfig {
        let mut c = DepictionConfig::default();
        if let Some(canvas) = self.canvas {
            c.canvas_width = canvas.width;
            c.canvas_height = canvas.height;
        }
        if let Some(m) = self.margin {
            c.margin = m;
        }
        if let Some(f) = self.font_size {
            c.font_size = f;
        }
        c
    }
}

#[derive(Debug, Clone, Args)]
pub struct InputArgs {
    /// An .e4xmi main model or a product definition (.json).
    pub input: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct GenerateArgs {
    /// An .e4xmi main model or a product definition (.json).
    pub input: PathBuf,
    #[arg(short, long, default_value = "manual")]
    pub output: PathBuf,
    #[arg(short, long, default_value = "html")]
    pub target: String,
    /// Fail on unresolved placeholders and insufficient coverage.
    #[arg(long)]
    pub strict: bool,
    /// Required documentation coverage in strict mode.
    #[arg(long, default_value = "1.0", value_parser = fraction)]
    pub coverage_threshold: f64,
    /// Directory of .tpl files replacing built-in templates of the same name.
    #[arg(long)]
    pub templates: Option<PathBuf>,
    /// Replacement for the orientation text of the Concept of Operations.
    #[arg(long)]
    pub orientation: Option<PathBuf>,
    /// Also write document-model.json.
    #[arg(long)]
    pub dump_model: bool,
    #[command(flatten)]
    pub depiction: DepictionArgs,
}

#[derive(Debug, Clone, Args)]
pub struct AnalyzeArgs {
    /// A model file or a directory searched for .e4xmi files.
    pub path: PathBuf,
    #[arg(long, default_value_t = 20)]
    pub min_commands: usize,
    #[arg(long, default_value_t = 5)]
    pub min_parts: usize,
}

#[derive(Debug, Clone, Args)]
pub struct AnnotateArgs {
    /// The sidecar file (<model>.ecrit.json).
    pub sidecar: PathBuf,
    /// Element to annotate; omit for application fields.
    #[arg(long)]
    pub element: Option<String>,
    /// description, precondition, postcondition, actors, about, isMultiUser,
    /// requiresLogin, audience or purpose.
    #[arg(long)]
    pub field: String,
    #[arg(long)]
    pub value: String,
    /// Model (or product definition) to check the element against.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Create the sidecar if it does not exist.
    #[arg(long)]
    pub create: bool,
}

#[derive(Debug, Clone, Args)]
pub struct DepictArgs {
    pub input: PathBuf,
    #[arg(short, long, default_value = "depictions")]
    pub output: PathBuf,
    /// Only this perspective.
    #[arg(long)]
    pub perspective: Option<String>,
    #[command(flatten)]
    pub depiction: DepictionArgs,
}

fn plural(n: usize, noun: &str) -> String {
    if n == 1 {
        format!("1 {noun}")
    } else {
        format!("{n} {noun}s")
    }
}

struct Io<'a> {
    out: &'a mut dyn Write,
    err: &'a mut dyn Write,
    json: bool,
}

impl Io<'_> {
    fn warn(&mut self, w: &Warning) {
        let _ = writeln!(self.err, "{w}");
    }

    fn fail(&mut self, stage: &str, message: impl std::fmt::Display) -> i32 {
        let _ = writeln!(self.err, "error[{stage}]: {message}");
        EXIT_ERROR
    }

    fn pipeline_error(&mut self, e: &PipelineError) -> i32 {
        let _ = writeln!(self.err, "error[{}]: {e}", e.stage());
        if e.is_coverage_failure() {
            EXIT_COVERAGE
        } else {
            EXIT_ERROR
        }
    }
}

/// Runs the CLI and returns the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ERROR } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                write!(err, "{text}")
            } else {
                write!(out, "{text}")
            };
            return code;
        }
    };
    let mut io = Io {
        out,
        err,
        json: cli.json,
    };
    match cli.command {
        Command::Generate(a) => cmd_generate(&a, &mut io),
        Command::Validate(a) => cmd_validate(&a, &mut io),
        Command::Analyze(a) => cmd_analyze(&a, &mut io),
        Command::Annotate(a) => cmd_annotate(&a, &mut io),
        Command::Depict(a) => cmd_depict(&a, &mut io),
    }
}

/// Writes `files` into `out_dir`, replacing a previous run as a whole.
///
/// Files are staged in a sibling directory that is renamed into place, so a
/// failure leaves the previous output untouched.
pub fn publish(out_dir: &Path, files: &[(String, Vec<u8>)]) -> Result<(), String> {
    let parent = match out_dir.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    fs::create_dir_all(&parent).map_err(|e| format!("{}: {e}", parent.display()))?;
    if out_dir.exists() {
        if !out_dir.is_dir() {
            return Err(format!(
                "{} exists and is not a directory",
                out_dir.display()
            ));
        }
        let non_empty = fs::read_dir(out_dir)
            .map_err(|e| format!("{}: {e}", out_dir.display()))?
            .next()
            .is_some();
        if non_empty && !out_dir.join(OUTPUT_MARKER).exists() {
            return Err(format!(
                "{} is not empty and was not written by ecrit; refusing to replace it",
                out_dir.display()
            ));
        }
    }
    let staging = tempfile::Builder::new()
        .prefix(".ecrit-staging-")
        .tempdir_in(&parent)
        .map_err(|e| format!("{}: {e}", parent.display()))?;
    let write_err = |p: &Path, e: std::io::Error| format!("{}: {e}", p.display());
    for (name, content) in files {
        let target = staging.path().join(name);
        if let Some(dir) = target.parent() {
            fs::create_dir_all(dir).map_err(|e| write_err(dir, e))?;
        }
        fs::write(&target, content).map_err(|e| write_err(&target, e))?;
    }
    let marker = staging.path().join(OUTPUT_MARKER);
    fs::write(&marker, "generated by ecrit; replaced on every run\n")
        .map_err(|e| write_err(&marker, e))?;
    #[cfg(unix)]
    {
        use std::os::unix::fs::PermissionsExt;
        let _ = fs::set_permissions(staging.path(), fs::Permissions::from_mode(0o755));
    }
    let staged = staging.keep();
    let swap = || -> Result<(), String> {
        if out_dir.exists() {
            let backup = parent.join(format!(".ecrit-previous-{}", std::process::id()));
            fs::rename(out_dir, &backup).map_err(|e| write_err(out_dir, e))?;
            if let Err(e) = fs::rename(&staged, out_dir) {
                let _ = fs::rename(&backup, out_dir);
                return Err(write_err(out_dir, e));
            }
            let _ = fs::remove_dir_all(&backup);
            Ok(())
        } else {
            fs::rename(&staged, out_dir).map_err(|e| write_err(out_dir, e))
        }
    };
    swap().inspect_err(|_| {
        let _ = fs::remove_dir_all(&staged);
    })
}

fn pretty(value: &impl serde::Serialize) -> Vec<u8> {
    let mut v = serde_json::to_vec_pretty(value).expect("report serializes");
    v.push(b'\n');
    v
}

fn coverage_line(c: &CoverageReport) -> String {
    format!(
        "coverage: {}/{} documentable elements described ({:.1}%)",
        c.annotated,
        c.total_documentable,
        c.coverage_ratio * 100.0
    )
}

fn generate_options(a: &GenerateArgs) -> Result<GenerateOptions, String> {
    let mut overrides = match &a.templates {
        Some(dir) => TemplateBundle::from_dir(dir).map_err(|e| e.to_string())?,
        None => TemplateBundle::default(),
    };
    if let Some(path) = &a.orientation {
        let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        overrides.insert("orientation", text);
    }
    Ok(GenerateOptions {
        strict: a.strict,
        coverage_threshold: a.coverage_threshold,
        depiction: a.depiction.config(),
        template_overrides: (!overrides.files.is_empty()).then_some(overrides),
        ..GenerateOptions::default()
    })
}

fn cmd_generate(a: &GenerateArgs, io: &mut Io<'_>) -> i32 {
    let options = match generate_options(a) {
        Ok(o) => o,
        Err(e) => return io.fail("cli", e),
    };
    let run = || -> Result<_, PipelineError> {
        let product = pipeline::load_product(&a.input)?;
        let timestamp = pipeline::generation_timestamp()?;
        pipeline::generate(
            &product,
            &OutputterRegistry::default(),
            &a.target,
            &options,
            &timestamp,
        )
    };
    let generated = match run() {
        Ok(g) => g,
        Err(e) => return io.pipeline_error(&e),
    };
    for w in &generated.output.warnings {
        io.warn(w);
    }
    let mut files: Vec<(String, Vec<u8>)> = generated
        .output
        .artifacts
        .iter()
        .map(|a| (a.path.clone(), a.content.clone()))
        .collect();
    files.push(("coverage.json".into(), pretty(&generated.output.coverage)));
    if a.dump_model {
        files.push((
            "document-model.json".into(),
            generated.document.to_json().into_bytes(),
        ));
    }
    if let Err(e) = publish(&a.output, &files) {
        return io.fail("io", e);
    }
    let names: Vec<&str> = files.iter().map(|(n, _)| n.as_str()).collect();
    let _ = if io.json {
        writeln!(
            io.out,
            "{}",
            json!({
                "output": a.output.display().to_string(),
                "files": names,
                "coverage": generated.output.coverage,
                "warnings": generated.output.warnings,
            })
        )
    } else {
        writeln!(
            io.out,
            "wrote {} to {}\n{}",
            plural(names.len(), "file"),
            a.output.display(),
            coverage_line(&generated.output.coverage)
        )
    };
    EXIT_OK
}

fn cmd_validate(a: &InputArgs, io: &mut Io<'_>) -> i32 {
    let assembled = match pipeline::load_product(&a.input).and_then(|p| pipeline::assemble(&p)) {
        Ok(x) => x,
        Err(e) => return io.pipeline_error(&e),
    };
    for w in &assembled.warnings {
        io.warn(w);
    }
    let r = &assembled.merge_report;
    if io.json {
        let _ = writeln!(
            io.out,
            "{}",
            json!({
                "sources": r.sources,
                "applied": r.applied,
                "danglingRefs": r.dangling_refs,
                "sidecars": assembled.sidecars,
                "warnings": assembled.warnings,
                "coverage": assembled.coverage,
            })
        );
        return EXIT_OK;
    }
    let mut text = String::new();
    for s in &r.sources {
        text.push_str(&format!(
            "parsed {} ({} warnings)\n",
            s.path,
            s.report.warnings.len()
        ));
    }
    text.push_str(&format!(
        "merged {} fragments into {} elements\n",
        r.applied.len(),
        assembled.model.len()
    ));
    for s in &assembled.sidecars {
        text.push_str(&format!("annotations from {s}\n"));
    }
    text.push_str(&coverage_line(&assembled.coverage));
    text.push('\n');
    for m in &assembled.coverage.missing {
        text.push_str(&format!("  missing description: {} ({})\n", m.id, m.kind));
    }
    let _ = write!(io.out, "{text}");
    EXIT_OK
}

fn cmd_analyze(a: &AnalyzeArgs, io: &mut Io<'_>) -> i32 {
    let thresholds = Thresholds {
        min_commands: a.min_commands,
        min_parts: a.min_parts,
    };
    let rows = if a.path.exists() {
        analyzer::analyze_path(&a.path, thresholds)
    } else {
        vec![analyzer::analyze_file(&a.path, thresholds)]
    };
    let _ = if io.json {
        writeln!(
            io.out,
            "{}",
            serde_json::to_string_pretty(&rows).expect("rows serialize")
        )
    } else {
        write!(io.out, "{}", analyzer::render_table(&rows))
    };
    EXIT_OK
}

fn cmd_annotate(a: &AnnotateArgs, io: &mut Io<'_>) -> i32 {
    let mut set = if a.sidecar.exists() {
        match pipeline::read_sidecar(&a.sidecar) {
            Ok(s) => s,
            Err(e) => return io.pipeline_error(&e),
        }
    } else if a.create {
        AnnotationSet::default()
    } else {
        return io.fail(
            "annotations",
            format!(
                "{} does not exist (pass --create to start one)",
                a.sidecar.display()
            ),
        );
    };
    let element = match a.element.as_deref().map(ElementId::new).transpose() {
        Ok(e) => e,
        Err(e) => return io.fail("annotations", e),
    };
    if let (Some(model_path), Some(id)) = (&a.model, &element) {
        let model = match pipeline::load_product(model_path)
            .and_then(|p| assemble_product(&p).map_err(PipelineError::from))
        {
            Ok((m, _)) => m,
            Err(e) => return io.pipeline_error(&e),
        };
        match model.get(id) {
            None => io.warn(&Warning::new(
                "unresolved-annotation",
                format!("`{id}` does not occur in {}", model_path.display()),
            )),
            Some(e)
                if matches!(a.field.as_str(), "precondition" | "postcondition")
                    && e.kind != ElementKind::Command =>
            {
                return io.fail(
                    "annotations",
                    crate::annotations::AnnotationError::NotACommand {
                        id: id.clone(),
                        kind: e.kind,
                    },
                )
            }
            Some(_) => {}
        }
    }
    if let Err(e) = set.set_field(element.as_ref(), &a.field, &a.value) {
        return io.fail("annotations", e);
    }
    let dir = match a.sidecar.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let written = tempfile::NamedTempFile::new_in(&dir).and_then(|mut tmp| {
        tmp.write_all(set.to_json().as_bytes())?;
        tmp.as_file().sync_all()?;
        tmp.persist(&a.sidecar).map_err(|e| e.error)?;
        Ok(())
    });
    if let Err(e) = written {
        return io.fail("io", format!("{}: {e}", a.sidecar.display()));
    }
    let _ = if io.json {
        writeln!(
            io.out,
            "{}",
            json!({ "updated": a.sidecar.display().to_string() })
        )
    } else {
        writeln!(io.out, "updated {}", a.sidecar.display())
    };
    EXIT_OK
}

fn cmd_depict(a: &DepictArgs, io: &mut Io<'_>) -> i32 {
    let model = match pipeline::load_product(&a.input)
        .and_then(|p| assemble_product(&p).map_err(PipelineError::from))
    {
        Ok((m, _)) => m,
        Err(e) => return io.pipeline_error(&e),
    };
    let config = a.depiction.config();
    let mut depictions = depiction::depict_perspectives(&model, &config);
    if let Some(only) = &a.perspective {
        depictions.retain(|d| d.perspective.as_str() == only);
        if depictions.is_empty() {
            return io.fail("depiction", format!("no perspective with id `{only}`"));
        }
    }
    let mut files = Vec::new();
    for d in &depictions {
        match &d.outcome {
            Ok(layout) => {
                for w in &layout.warnings {
                    io.warn(w);
                }
                let art = depiction::render_depiction_svg(&d.perspective, &layout.rects, &config);
                files.push((art.path, art.content));
            }
            Err(e) => io.warn(&Warning::new("depiction-skipped", e.to_string())),
        }
    }
    if let Err(e) = publish(&a.output, &files) {
        return io.fail("io", e);
    }
    let names: Vec<&str> = files.iter().map(|(n, _)| n.as_str()).collect();
    let _ = if io.json {
        writeln!(
            io.out,
            "{}",
            json!({ "output": a.output.display().to_string(), "files": names })
        )
    } else {
        writeln!(
            io.out,
            "wrote {} to {}",
            plural(names.len(), "image"),
            a.output.display()
        )
    };
    EXIT_OK
}
