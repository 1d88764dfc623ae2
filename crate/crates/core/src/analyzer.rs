//! Eligibility triage and structural statistics for application models.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::appmodel::{ApplicationModel, Category, ElementKind};
use crate::e4xmi;

pub const FRAGMENT_ONLY_REASON: &str = "a full application model is required, not a fragment only";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Thresholds {
    pub min_commands: usize,
    pub min_parts: usize,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            min_commands: 20,
            min_parts: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct EligibilityReport {
    pub has_full_model: bool,
    pub command_count: usize,
    pub part_count: usize,
    pub eligible: bool,
    pub reasons: Vec<String>,
}

pub fn check_eligibility(model: &ApplicationModel, thresholds: Thresholds) -> EligibilityReport {
    let has_full_model = !model.is_fragment_only;
    let command_count = model.elements_of_kind(ElementKind::Command).len();
    let part_count = model.elements_of_kind(ElementKind::Part).len();
    let mut reasons = Vec::new();
    if !has_full_model {
        reasons.push(FRAGMENT_ONLY_REASON.to_string());
    }
    if command_count < thresholds.min_commands {
        reasons.push(format!(
            "{command_count} commands, at least {} required",
            thresholds.min_commands
        ));
    }
    if part_count < thresholds.min_parts {
        reasons.push(format!(
            "{part_count} parts, at least {} required",
            thresholds.min_parts
        ));
    }
    EligibilityReport {
        has_full_model,
        command_count,
        part_count,
        eligible: reasons.is_empty(),
        reasons,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ModelStats {
    /// Every kind, including those with no elements.
    pub kinds: BTreeMap<ElementKind, usize>,
    pub categories: BTreeMap<Category, usize>,
    pub total: usize,
}

pub fn stats(model: &ApplicationModel) -> ModelStats {
    let mut kinds: BTreeMap<ElementKind, usize> =
        ElementKind::ALL.iter().map(|k| (*k, 0)).collect();
    let mut categories: BTreeMap<Category, usize> = Category::ALL.iter().map(|c| (*c, 0)).collect();
    for e in model.elements() {
        *kinds.entry(e.kind).or_default() += 1;
        *categories.entry(e.kind.category()).or_default() += 1;
    }
    ModelStats {
        kinds,
        categories,
        total: model.len(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FileAnalysis {
    pub path: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub report: Option<EligibilityReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stats: Option<ModelStats>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

pub fn analyze_file(path: &Path, thresholds: Thresholds) -> FileAnalysis {
    let shown = path.display().to_string();
    let outcome = std::fs::read(path)
        .map_err(|e| e.to_string())
        .and_then(|bytes| e4xmi::parse_model_from(&bytes, &shown).map_err(|e| e.to_string()));
    match outcome {
        Ok((model, _)) => FileAnalysis {
            path: shown,
            report: Some(check_eligibility(&model, thresholds)),
            stats: Some(stats(&model)),
            error: None,
        },
        Err(error) => FileAnalysis {
            path: shown,
            report: None,
            stats: None,
            error: Some(error),
        },
    }
}

/// `.e4xmi` files under `root` (or `root` itself), sorted by path.
pub fn discover_models(root: &Path) -> Vec<PathBuf> {
    if root.is_file() {
        return vec![root.to_path_buf()];
    }
    let mut found: Vec<PathBuf> = walkdir::WalkDir::new(root)
        .into_iter()
        .filter_map(Result::ok)
        .filter(|e| e.file_type().is_file() && e.path().extension().is_some_and(|x| x == "e4xmi"))
        .map(|e| e.into_path())
        .collect();
    found.sort();
    found
}

/// Analyzes every model found under `root`, several files at a time.
pub fn analyze_path(root: &Path, thresholds: Thresholds) -> Vec<FileAnalysis> {
    let files = discover_models(root);
    let workers = std::thread::available_parallelism()
        .map_or(1, |n| n.get())
        .max(1);
    let chunk = files.len().div_ceil(workers).max(1);
    std::thread::scope(|scope| {
        let handles: Vec<_> = files
            .chunks(chunk)
            .map(|group| {
                scope.spawn(move || {
                    group
                        .iter()
                        .map(|f| analyze_file(f, thresholds))
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("analysis thread panicked"))
            .collect()
    })
}

pub const TABLE_NOTE: &str = "# counts are per file as given, before any fragment merge";

pub fn render_table(rows: &[FileAnalysis]) -> String {
    let header = ["FILE", "FULL", "COMMANDS", "PARTS", "ELIGIBLE", "NOTES"];
    let mut cells: Vec<[String; 6]> = vec![header.map(str::to_string)];
    for r in rows {
        cells.push(match (&r.report, &r.error) {
            (Some(rep), _) => [
                r.path.clone(),
                if rep.has_full_model { "yes" } else { "no" }.into(),
                rep.command_count.to_string(),
                rep.part_count.to_string(),
                if rep.eligible { "yes" } else { "no" }.into(),
                rep.reasons.join("; "),
            ],
            (None, err) => [
                r.path.clone(),
                "-".into(),
                "-".into(),
                "-".into(),
                "-".into(),
                format!("error: {}", err.as_deref().unwrap_or("unknown")),
            ],
        });
    }
    let widths: Vec<usize> = (0..6)
        .map(|c| {
            cells
                .iter()
                .map(|row| row[c].chars().count())
                .max()
                .unwrap_or(0)
        })
        .collect();
    let mut out = String::new();
    let _ = writeln!(out, "{TABLE_NOTE}");
    for row in &cells {
        let line: Vec<String> = row
            .iter()
            .zip(&widths)
            .enumerate()
            .map(|(i, (cell, w))| {
                if i == 5 {
                    cell.clone()
                } else {
                    format!("{cell:<w$}")
                }
            })
            .collect();
        let _ = writeln!(out, "{}", line.join("  ").trim_end());
    }
    out
}
