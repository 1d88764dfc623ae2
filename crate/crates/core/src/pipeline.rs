//! End-to-end wiring: product assembly, annotation loading, document model,
//! depictions and manual rendering.

use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::annotations::{self, AnnotationError, AnnotationSet, CoverageReport, SIDECAR_SUFFIX};
use crate::appmodel::ApplicationModel;
use crate::depiction::{depict_perspectives, PerspectiveDepiction};
use crate::diagnostics::Warning;
use crate::docmodel::{build_document_model, DocumentModel, ProductInfo};
use crate::merge::{assemble_product, MergeError, MergeReport, ProductDefinition};
use crate::outputters::{GenerateOptions, ManualOutput, OutputError, OutputterRegistry};

pub const TIMESTAMP_ENV: &str = "ECRIT_TIMESTAMP";

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Merge(#[from] MergeError),
    #[error("{path}: {source}")]
    Annotation {
        path: String,
        #[source]
        source: AnnotationError,
    },
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("{TIMESTAMP_ENV}=\"{0}\" is not an RFC 3339 timestamp")]
    BadTimestamp(String),
    #[error(transparent)]
    Output(#[from] OutputError),
}

impl PipelineError {
    /// Pipeline stage the error comes from.
    pub fn stage(&self) -> &'static str {
        match self {
            PipelineError::Merge(MergeError::Parse { .. }) => "e4xmi",
            PipelineError::Merge(_) => "merge",
            PipelineError::Annotation { .. } => "annotations",
            PipelineError::Io { .. } => "io",
            PipelineError::BadTimestamp(_) => "cli",
            PipelineError::Output(OutputError::Template(_)) => "template",
            PipelineError::Output(_) => "outputters",
        }
    }

    pub fn is_coverage_failure(&self) -> bool {
        matches!(
            self,
            PipelineError::Output(OutputError::StrictModeCoverageFailure { .. })
        )
    }
}

/// A product definition for `input`: a `.json` file is read as one, anything
/// else is taken as a lone main model.
pub fn load_product(input: &Path) -> Result<ProductDefinition, PipelineError> {
    if input
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("json"))
    {
        return Ok(ProductDefinition::load(input)?);
    }
    Ok(ProductDefinition {
        name: String::new(),
        version: String::new(),
        main_model_path: input.to_path_buf(),
        fragment_paths: Vec::new(),
        annotation_paths: Vec::new(),
    })
}

/// `<dir>/<stem>.ecrit.json` for a model file.
pub fn sidecar_path(model_path: &Path) -> PathBuf {
    let stem = model_path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    model_path.with_file_name(format!("{stem}{SIDECAR_SUFFIX}"))
}

pub fn read_sidecar(path: &Path) -> Result<AnnotationSet, PipelineError> {
    let bytes = std::fs::read(path).map_err(|e| PipelineError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    annotations::load_annotations(&bytes).map_err(|source| PipelineError::Annotation {
        path: path.display().to_string(),
        source,
    })
}

#[derive(Debug, Clone)]
pub struct Assembled {
    pub product: ProductDefinition,
    pub model: ApplicationModel,
    pub merge_report: MergeReport,
    pub annotations: AnnotationSet,
    pub sidecars: Vec<String>,
    pub warnings: Vec<Warning>,
    pub coverage: CoverageReport,
}

/// Merges the product and gathers all of its annotations.
pub fn assemble(product: &ProductDefinition) -> Result<Assembled, PipelineError> {
    let (model, merge_report) = assemble_product(product)?;
    let mut warnings = merge_report.warnings.clone();

    let mut candidates: Vec<PathBuf> = std::iter::once(&product.main_model_path)
        .chain(&product.fragment_paths)
        .map(|p| sidecar_path(p))
        .filter(|p| p.is_file())
        .collect();
    candidates.extend(product.annotation_paths.iter().cloned());
    let mut sidecar = AnnotationSet::default();
    let mut sidecars = Vec::new();
    for path in &candidates {
        let next = read_sidecar(path)?;
        // Later files take precedence.
        let (combined, w) = annotations::combine(&next, &sidecar);
        sidecar = combined;
        warnings.extend(w);
        sidecars.push(path.display().to_string());
    }
    let (inline, w) = annotations::extract_inline_annotations(&model);
    warnings.extend(w);
    let (combined, w) = annotations::combine(&sidecar, &inline);
    warnings.extend(w);
    warnings.extend(combined.validate_against(&model).map_err(|source| {
        PipelineError::Annotation {
            path: product.main_model_path.display().to_string(),
            source,
        }
    })?);
    let coverage = annotations::coverage(&model, &combined);
    Ok(Assembled {
        product: product.clone(),
        model,
        merge_report,
        annotations: combined,
        sidecars,
        warnings,
        coverage,
    })
}

/// The generation timestamp, pinned by `ECRIT_TIMESTAMP` when set.
pub fn generation_timestamp() -> Result<String, PipelineError> {
    match std::env::var(TIMESTAMP_ENV) {
        Ok(v) => chrono::DateTime::parse_from_rfc3339(v.trim())
            .map(|_| v.trim().to_string())
            .map_err(|_| PipelineError::BadTimestamp(v)),
        Err(_) => Ok(chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true)),
    }
}

pub fn document_model(assembled: &Assembled, timestamp: &str) -> DocumentModel {
    build_document_model(
        &assembled.model,
        &assembled.annotations,
        &ProductInfo {
            name: assembled.product.name.clone(),
            version: assembled.product.version.clone(),
        },
        timestamp,
    )
}

#[derive(Debug, Clone)]
pub struct Generated {
    pub assembled: Assembled,
    pub document: DocumentModel,
    pub depictions: Vec<PerspectiveDepiction>,
    pub output: ManualOutput,
}

/// Runs the whole pipeline for one product and target. Nothing is written.
pub fn generate(
    product: &ProductDefinition,
    registry: &OutputterRegistry,
    target: &str,
    options: &GenerateOptions,
    timestamp: &str,
) -> Result<Generated, PipelineError> {
    registry.get(target)?;
    let assembled = assemble(product)?;
    let document = document_model(&assembled, timestamp);
    let depictions = depict_perspectives(&assembled.model, &options.depiction);
    let mut output = registry.generate(&document, target, &depictions, options)?;
    let mut warnings = assembled.warnings.clone();
    warnings.append(&mut output.warnings);
    output.warnings = warnings;
    Ok(Generated {
        assembled,
        document,
        depictions,
        output,
    })
}
