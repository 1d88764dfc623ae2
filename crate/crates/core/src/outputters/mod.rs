//! Manual generation: fills a target's template bundle from the document
//! model and collects the files that make up the manual.

pub mod escape;
pub mod template;

use std::collections::{BTreeMap, HashSet};

use serde::Serialize;
use serde_json::{json, Map, Value};
use thiserror::Error;

use crate::annotations::{CoverageReport, MissingDocumentation};
use crate::depiction::{self, DepictionConfig, PerspectiveDepiction};
use crate::diagnostics::Warning;
use crate::docmodel::{DocEntry, DocumentModel, TriggerKind};

pub use template::{
    render_template, RenderOptions, Template, TemplateBundle, TemplateError,
    DEFAULT_MISSING_ANNOTATION,
};

/// A file produced by a generation run, relative to the output directory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RenderedArtifact {
    pub path: String,
    pub content: Vec<u8>,
    pub media_type: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SourceTag {
    /// Produced by the output format itself.
    Soft,
    Model,
    Annotation,
    /// Cannot be derived; emitted with an explanatory sentence.
    Stub,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct IsoComponent {
    pub key: &'static str,
    pub title: &'static str,
    pub source: SourceTag,
}

/// The ten user-manual components, in their mandatory order.
pub const MANUAL_STRUCTURE: [IsoComponent; 10] = [
    IsoComponent {
        key: "identificationData",
        title: "Identification Data",
        source: SourceTag::Soft,
    },
    IsoComponent {
        key: "tableOfContents",
        title: "Table of Contents",
        source: SourceTag::Soft,
    },
    IsoComponent {
        key: "introduction",
        title: "Introduction",
        source: SourceTag::Annotation,
    },
    IsoComponent {
        key: "informationForUse",
        title: "Information for Use of the Documentation",
        source: SourceTag::Soft,
    },
    IsoComponent {
        key: "conceptOfOperations",
        title: "Concept of Operations",
        source: SourceTag::Model,
    },
    IsoComponent {
        key: "procedures",
        title: "Procedures",
        source: SourceTag::Stub,
    },
    IsoComponent {
        key: "softwareCommands",
        title: "Information on Software Commands",
        source: SourceTag::Model,
    },
    IsoComponent {
        key: "errorMessages",
        title: "Error Messages and Problem Resolution",
        source: SourceTag::Stub,
    },
    IsoComponent {
        key: "glossary",
        title: "Glossary",
        source: SourceTag::Stub,
    },
    IsoComponent {
        key: "navigationalFeatures",
        title: "Navigational Features",
        source: SourceTag::Soft,
    },
];

fn anchor_of(key: &str) -> String {
    let mut out = String::new();
    for c in key.chars() {
        if c.is_ascii_uppercase() {
            out.push('-');
            out.push(c.to_ascii_lowercase());
        } else {
            out.push(c);
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DepictionFormat {
    /// Reference the SVG image.
    Svg,
    /// Reference a LaTeX `picture` drawing of the same layout.
    LatexPicture,
}

/// Everything needed to produce one output format.
#[derive(Debug, Clone)]
pub struct OutputterDescriptor {
    pub name: String,
    pub extension: String,
    pub media_type: String,
    pub escape: fn(&str) -> String,
    pub templates: TemplateBundle,
    pub depiction: DepictionFormat,
}

#[derive(Debug, Error)]
pub enum OutputError {
    #[error("unknown output target `{name}` (available: {})", available.join(", "))]
    UnknownTarget {
        name: String,
        available: Vec<String>,
    },
    #[error("an output target named `{0}` is already registered")]
    DuplicateTargetName(String),
    #[error(
        "documentation coverage {:.1}% is below the required {:.1}%; missing descriptions: {}",
        coverage * 100.0,
        threshold * 100.0,
        missing.iter().map(|m| format!("{} ({})", m.id, m.kind)).collect::<Vec<_>>().join(", ")
    )]
    StrictModeCoverageFailure {
        coverage: f64,
        threshold: f64,
        missing: Vec<MissingDocumentation>,
    },
    #[error("strict mode needs an application description (meta.about)")]
    StrictModeMissingAbout,
    #[error(transparent)]
    Template(#[from] TemplateError),
}

macro_rules! bundle {
    ($dir:literal: $($name:literal),+ $(,)?) => {
        TemplateBundle::from_pairs(&[
            $(($name, include_str!(concat!("../../templates/", $dir, "/", $name)))),+
        ])
    };
}

pub fn html_outputter() -> OutputterDescriptor {
    OutputterDescriptor {
        name: "html".into(),
        extension: "html".into(),
        media_type: "text/html".into(),
        escape: escape::html,
        templates: bundle!("html":
            "manual.tpl", "identification.tpl", "contents.tpl", "introduction.tpl",
            "information-for-use.tpl", "concept-of-operations.tpl", "orientation.tpl",
            "procedures.tpl", "commands.tpl", "error-messages.tpl", "glossary.tpl",
            "navigation.tpl",
        ),
        depiction: DepictionFormat::Svg,
    }
}

pub fn latex_outputter() -> OutputterDescriptor {
    OutputterDescriptor {
        name: "latex".into(),
        extension: "tex".into(),
        media_type: "application/x-tex".into(),
        escape: escape::latex,
        templates: bundle!("latex":
            "manual.tpl", "identification.tpl", "contents.tpl", "introduction.tpl",
            "information-for-use.tpl", "concept-of-operations.tpl", "orientation.tpl",
            "procedures.tpl", "commands.tpl", "error-messages.tpl", "glossary.tpl",
            "navigation.tpl",
        ),
        depiction: DepictionFormat::LatexPicture,
    }
}

const BUILT_IN: [&str; 2] = ["html", "latex"];

#[derive(Debug, Clone)]
pub struct OutputterRegistry {
    targets: BTreeMap<String, OutputterDescriptor>,
}

impl Default for OutputterRegistry {
    fn default() -> Self {
        let mut targets = BTreeMap::new();
        for d in [html_outputter(), latex_outputter()] {
            targets.insert(d.name.clone(), d);
        }
        Self { targets }
    }
}

impl OutputterRegistry {
    pub fn register(&mut self, descriptor: OutputterDescriptor) -> Result<(), OutputError> {
        if self.targets.contains_key(&descriptor.name)
            || BUILT_IN.contains(&descriptor.name.as_str())
        {
            return Err(OutputError::DuplicateTargetName(descriptor.name));
        }
        self.targets.insert(descriptor.name.clone(), descriptor);
        Ok(())
    }

    pub fn names(&self) -> Vec<String> {
        self.targets.keys().cloned().collect()
    }

    pub fn get(&self, name: &str) -> Result<&OutputterDescriptor, OutputError> {
        self.targets
            .get(name)
            .ok_or_else(|| OutputError::UnknownTarget {
                name: name.to_string(),
                available: self.names(),
            })
    }

    pub fn generate(
        &self,
        doc: &DocumentModel,
        target: &str,
        depictions: &[PerspectiveDepiction],
        options: &GenerateOptions,
    ) -> Result<ManualOutput, OutputError> {
        generate_with(self.get(target)?, doc, depictions, options)
    }
}

#[derive(Debug, Clone)]
pub struct GenerateOptions {
    pub strict: bool,
    /// Minimum documentation coverage in strict mode, in [0, 1].
    pub coverage_threshold: f64,
    pub missing_annotation: String,
    pub depiction: DepictionConfig,
    /// Replaces or adds templates of the target's bundle.
    pub template_overrides: Option<TemplateBundle>,
}

impl Default for GenerateOptions {
    fn default() -> Self {
        Self {
            strict: false,
            coverage_threshold: 1.0,
            missing_annotation: DEFAULT_MISSING_ANNOTATION.to_string(),
            depiction: DepictionConfig::default(),
            template_overrides: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ManualOutput {
    /// The manual first, then its images.
    pub artifacts: Vec<RenderedArtifact>,
    pub warnings: Vec<Warning>,
    pub coverage: CoverageReport,
}

/// Coverage over the documentable entries of a document model.
pub fn document_coverage(doc: &DocumentModel) -> CoverageReport {
    let entries = doc
        .windows
        .iter()
        .chain(&doc.perspectives)
        .chain(&doc.parts)
        .chain(&doc.commands);
    let mut total = 0;
    let mut missing = Vec::new();
    for e in entries {
        total += 1;
        if !e
            .annotation
            .as_ref()
            .is_some_and(|a| !a.description.trim().is_empty())
        {
            missing.push(MissingDocumentation {
                id: e.id.clone(),
                kind: e.kind,
            });
        }
    }
    CoverageReport::from_counts(total, missing)
}

/// Generates a manual with one of the built-in targets.
pub fn generate_manual(
    doc: &DocumentModel,
    target: &str,
    depictions: &[PerspectiveDepiction],
    options: &GenerateOptions,
) -> Result<ManualOutput, OutputError> {
    OutputterRegistry::default().generate(doc, target, depictions, options)
}

struct UniquePaths(HashSet<String>);

impl UniquePaths {
    fn claim(&mut self, path: &str) -> String {
        if self.0.insert(path.to_string()) {
            return path.to_string();
        }
        let (stem, ext) = path.split_once('.').unwrap_or((path, ""));
        (2..)
            .map(|n| {
                if ext.is_empty() {
                    format!("{stem}-{n}")
                } else {
                    format!("{stem}-{n}.{ext}")
                }
            })
            .find(|p| self.0.insert(p.clone()))
            .expect("unbounded suffixes")
    }
}

fn entry_value(entry: &DocEntry, anchor: String) -> Value {
    let mut v = serde_json::to_value(entry).expect("doc entry serializes");
    let obj = v.as_object_mut().expect("entry is an object");
    obj.insert("anchor".into(), Value::String(anchor));
    if entry.kind == crate::appmodel::ElementKind::Command {
        obj.insert(
            "hasNoInitiators".into(),
            Value::Bool(entry.initiators.is_empty()),
        );
    }
    if let Some(Value::Array(list)) = obj.get_mut("initiators") {
        for (init, src) in list.iter_mut().zip(&entry.initiators) {
            let name = match src.trigger {
                TriggerKind::MenuItem => "menu item",
                TriggerKind::ToolItem => "tool item",
                TriggerKind::KeyBinding => "key binding",
            };
            init["triggerName"] = Value::String(name.into());
        }
    }
    v
}

fn generate_with(
    desc: &OutputterDescriptor,
    doc: &DocumentModel,
    depictions: &[PerspectiveDepiction],
    options: &GenerateOptions,
) -> Result<ManualOutput, OutputError> {
    let coverage = document_coverage(doc);
    if options.strict {
        if doc.meta.about().trim().is_empty() {
            return Err(OutputError::StrictModeMissingAbout);
        }
        if coverage.coverage_ratio < options.coverage_threshold && !coverage.missing.is_empty() {
            return Err(OutputError::StrictModeCoverageFailure {
                coverage: coverage.coverage_ratio,
                threshold: options.coverage_threshold,
                missing: coverage.missing.clone(),
            });
        }
    }

    let manual_path = format!("manual.{}", desc.extension);
    let mut paths = UniquePaths(HashSet::from([manual_path.clone()]));
    let mut images = Vec::new();
    let mut warnings = Vec::new();
    let mut references: BTreeMap<&str, (Option<String>, Option<String>)> = BTreeMap::new();
    for d in depictions {
        let slot = match &d.outcome {
            Ok(layout) => {
                warnings.extend(layout.warnings.iter().cloned());
                let mut svg = depiction::render_depiction_svg(
                    &d.perspective,
                    &layout.rects,
                    &options.depiction,
                );
                svg.path = paths.claim(&svg.path);
                let reference = match desc.depiction {
                    DepictionFormat::Svg => svg.path.clone(),
                    DepictionFormat::LatexPicture => {
                        let mut pic = depiction::render_depiction_latex(
                            &d.perspective,
                            &layout.rects,
                            &options.depiction,
                        );
                        pic.path = paths.claim(&pic.path);
                        let r = pic.path.clone();
                        images.push(pic);
                        r
                    }
                };
                images.push(svg);
                (Some(reference), None)
            }
            Err(e) => {
                warnings.push(Warning::new("depiction-skipped", e.to_string()));
                (None, Some(format!("No layout image: {e}.")))
            }
        };
        references.insert(d.perspective.as_str(), slot);
    }

    let mut ctx = serde_json::to_value(doc).expect("document model serializes");
    let parts: Vec<Value> = doc
        .parts
        .iter()
        .enumerate()
        .map(|(i, p)| entry_value(p, format!("part-{}", i + 1)))
        .collect();
    let mut placed = HashSet::new();
    let perspectives: Vec<Value> = doc
        .perspectives
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let mut v = entry_value(p, format!("perspective-{}", i + 1));
            let contained: Vec<Value> = doc
                .parts
                .iter()
                .zip(&parts)
                .filter(|(part, _)| part.path.segments.iter().any(|s| s.id == p.id))
                .map(|(part, value)| {
                    placed.insert(part.id.clone());
                    value.clone()
                })
                .collect();
            let (reference, note) = references.get(p.id.as_str()).cloned().unwrap_or_default();
            let obj = v.as_object_mut().expect("entry is an object");
            obj.insert("containedParts".into(), Value::Array(contained));
            obj.insert(
                "depiction".into(),
                reference.map_or(Value::Null, Value::String),
            );
            obj.insert(
                "depictionNote".into(),
                note.map_or(Value::Null, Value::String),
            );
            v
        })
        .collect();
    let loose: Vec<Value> = doc
        .parts
        .iter()
        .zip(&parts)
        .filter(|(p, _)| !placed.contains(&p.id))
        .map(|(_, v)| v.clone())
        .collect();
    let commands: Vec<Value> = doc
        .commands
        .iter()
        .enumerate()
        .map(|(i, c)| entry_value(c, format!("command-{}", i + 1)))
        .collect();
    let windows: Vec<Value> = doc
        .windows
        .iter()
        .enumerate()
        .map(|(i, w)| entry_value(w, format!("window-{}", i + 1)))
        .collect();

    let mut sections = Map::new();
    let mut structure = Vec::new();
    for (i, c) in MANUAL_STRUCTURE.iter().enumerate() {
        let v = json!({
            "key": c.key,
            "title": c.title,
            "anchor": anchor_of(c.key),
            "number": i + 1,
            "source": c.source,
        });
        sections.insert(c.key.to_string(), v.clone());
        structure.push(v);
    }
    let title = if doc.product_name.trim().is_empty() {
        doc.application_label.clone()
    } else {
        doc.product_name.clone()
    };
    let obj = ctx.as_object_mut().expect("document model is an object");
    obj.insert("parts".into(), Value::Array(parts));
    obj.insert("perspectives".into(), Value::Array(perspectives));
    obj.insert("commands".into(), Value::Array(commands));
    obj.insert("windows".into(), Value::Array(windows));
    obj.insert("looseParts".into(), Value::Array(loose));
    obj.insert("sections".into(), Value::Object(sections));
    obj.insert("structure".into(), Value::Array(structure));
    obj.insert(
        "coverage".into(),
        serde_json::to_value(&coverage).expect("coverage serializes"),
    );
    obj.insert(
        "manual".into(),
        json!({
            "title": title,
            "target": desc.name,
            "noAbout": doc.meta.about().trim().is_empty(),
        }),
    );

    let bundle = match &options.template_overrides {
        Some(o) => desc.templates.clone().overlay(o.clone()),
        None => desc.templates.clone(),
    };
    let entry = bundle.template(template::ENTRY_TEMPLATE)?;
    let (text, template_warnings) = render_template(
        &entry,
        &ctx,
        &RenderOptions {
            escape: desc.escape,
            strict: options.strict,
            missing_annotation: &options.missing_annotation,
            bundle: Some(&bundle),
        },
    )?;
    warnings.extend(template_warnings);

    let mut artifacts = vec![RenderedArtifact {
        path: manual_path,
        content: text.into_bytes(),
        media_type: desc.media_type.clone(),
    }];
    artifacts.extend(images);
    Ok(ManualOutput {
        artifacts,
        warnings,
        coverage,
    })
}
