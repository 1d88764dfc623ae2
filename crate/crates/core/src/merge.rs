//! Product assembly: inserting model fragments into a main application model.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::appmodel::{
    build_index, ApplicationModel, ElementId, ElementKind, ModelElement, ModelError, Node,
};
use crate::diagnostics::Warning;
use crate::e4xmi::{self, ParseError, ParseReport};

/// Where a fragment's elements go among the target parent's children.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Position {
    First,
    Last,
    Index(usize),
    Before(ElementId),
    After(ElementId),
}

impl Position {
    /// Accepts `first`, `last`, a decimal index (optionally `index:n`),
    /// `before:<id>` and `after:<id>`.
    pub fn parse(text: &str) -> Option<Self> {
        let text = text.trim();
        match text {
            "" | "last" => return Some(Position::Last),
            "first" => return Some(Position::First),
            _ => {}
        }
        if let Some(rest) = text.strip_prefix("before:") {
            return ElementId::new(rest).ok().map(Position::Before);
        }
        if let Some(rest) = text.strip_prefix("after:") {
            return ElementId::new(rest).ok().map(Position::After);
        }
        let digits = text.strip_prefix("index:").unwrap_or(text);
        digits.parse().ok().map(Position::Index)
    }
}

impl fmt::Display for Position {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Position::First => f.write_str("first"),
            Position::Last => f.write_str("last"),
            Position::Index(n) => write!(f, "{n}"),
            Position::Before(id) => write!(f, "before:{id}"),
            Position::After(id) => write!(f, "after:{id}"),
        }
    }
}

/// A partial model contributed under an existing parent element.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelFragment {
    pub target_parent_id: ElementId,
    pub feature_name: String,
    pub position: Position,
    pub elements: Vec<Node>,
    /// File the fragment was read from, for diagnostics.
    pub source: Option<String>,
    pub extra_attributes: BTreeMap<String, String>,
}

impl ModelFragment {
    pub fn new(target: ElementId, feature: impl Into<String>, elements: Vec<ModelElement>) -> Self {
        let feature = feature.into();
        Self {
            target_parent_id: target,
            elements: elements
                .into_iter()
                .map(|e| Node::Element(e.with_feature(feature.clone())))
                .collect(),
            feature_name: feature,
            position: Position::Last,
            source: None,
            extra_attributes: BTreeMap::new(),
        }
    }

    pub fn at(mut self, position: Position) -> Self {
        self.position = position;
        self
    }

    fn origin(&self, index: usize) -> String {
        self.source
            .clone()
            .unwrap_or_else(|| format!("fragment #{index}"))
    }
}

const CHILD_KINDS: &[ElementKind] = &[
    ElementKind::Window,
    ElementKind::PerspectiveStack,
    ElementKind::Perspective,
    ElementKind::PartSashContainer,
    ElementKind::PartStack,
    ElementKind::Part,
    ElementKind::Menu,
    ElementKind::MenuItem,
    ElementKind::HandledMenuItem,
    ElementKind::DirectMenuItem,
    ElementKind::MenuSeparator,
    ElementKind::ToolBar,
    ElementKind::HandledToolItem,
    ElementKind::DirectToolItem,
];

/// Element kinds a containment feature may hold. `None` for features the
/// merger does not know.
pub fn feature_kinds(feature: &str) -> Option<&'static [ElementKind]> {
    Some(match feature {
        "commands" => &[ElementKind::Command],
        "handlers" => &[ElementKind::Handler],
        "bindingTables" => &[ElementKind::BindingTable],
        "bindings" => &[ElementKind::KeyBinding],
        "parameters" => &[ElementKind::CommandParameter],
        "menus" | "mainMenu" => &[ElementKind::Menu],
        "trimBars" | "toolbars" | "toolbar" => &[ElementKind::ToolBar],
        "sharedElements" => &[
            ElementKind::Part,
            ElementKind::PartStack,
            ElementKind::PartSashContainer,
        ],
        "windows" => &[ElementKind::Window],
        "children" => CHILD_KINDS,
        _ => return None,
    })
}

#[derive(Debug, Error)]
pub enum MergeError {
    #[error("fragment #{fragment_index} ({origin}) targets unknown parent `{id}`")]
    UnknownTargetParent {
        id: ElementId,
        fragment_index: usize,
        origin: String,
    },
    #[error("fragment #{fragment_index}: duplicate element id `{id}`, defined in {existing_origin} and {new_origin}")]
    DuplicateId {
        id: ElementId,
        fragment_index: usize,
        existing_origin: String,
        new_origin: String,
    },
    #[error("fragment #{fragment_index} ({origin}): {reason}")]
    BadPosition {
        fragment_index: usize,
        origin: String,
        reason: String,
    },
    #[error("fragment #{fragment_index} ({origin}): unknown feature name `{feature}`")]
    UnknownFeature {
        fragment_index: usize,
        origin: String,
        feature: String,
    },
    #[error("fragment #{fragment_index} ({origin}): {kind} elements cannot be placed in feature `{feature}`")]
    KindMismatch {
        fragment_index: usize,
        origin: String,
        kind: String,
        feature: String,
    },
    #[error("dangling command references after merge: {}", join_ids(.0))]
    DanglingReferenceAfterMerge(Vec<ElementId>),
    #[error("{path}: a full application model is required, not a fragment only")]
    FragmentOnlyMain { path: String },
    #[error("{path}: {source}")]
    Parse {
        path: String,
        #[source]
        source: ParseError,
    },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("product definition {path}: {message}")]
    ProductDefinition { path: String, message: String },
    #[error(transparent)]
    Model(#[from] ModelError),
}

fn join_ids(ids: &[ElementId]) -> String {
    ids.iter()
        .map(ElementId::as_str)
        .collect::<Vec<_>>()
        .join(", ")
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct AppliedFragment {
    pub index: usize,
    pub origin: String,
    pub target_parent_id: ElementId,
    pub feature_name: String,
    pub inserted: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SourceReport {
    pub path: String,
    pub report: ParseReport,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct MergeReport {
    pub sources: Vec<SourceReport>,
    pub applied: Vec<AppliedFragment>,
    /// Command references that do not resolve to a Command after merging.
    pub dangling_refs: Vec<ElementId>,
    pub warnings: Vec<Warning>,
}

/// Inserts each fragment, in order, into a copy of `main`.
pub fn merge(
    main: &ApplicationModel,
    fragments: &[ModelFragment],
) -> Result<(ApplicationModel, MergeReport), MergeError> {
    let mut root = main.root().clone();
    let main_origin = if main.source_path.is_empty() {
        "main model".to_string()
    } else {
        main.source_path.clone()
    };
    let mut origins: HashMap<ElementId, String> = main
        .index()
        .keys()
        .map(|id| (id.clone(), main_origin.clone()))
        .collect();
    let mut report = MergeReport::default();

    for (i, fragment) in fragments.iter().enumerate() {
        let origin = fragment.origin(i);
        let kinds =
            feature_kinds(&fragment.feature_name).ok_or_else(|| MergeError::UnknownFeature {
                fragment_index: i,
                origin: origin.clone(),
                feature: fragment.feature_name.clone(),
            })?;

        let mut incoming = Vec::new();
        for node in &fragment.elements {
            match node {
                Node::Element(e) if kinds.contains(&e.kind) => incoming.push(e),
                Node::Element(e) => {
                    return Err(MergeError::KindMismatch {
                        fragment_index: i,
                        origin,
                        kind: e.kind.to_string(),
                        feature: fragment.feature_name.clone(),
                    })
                }
                Node::Opaque(o) => {
                    return Err(MergeError::KindMismatch {
                        fragment_index: i,
                        origin,
                        kind: format!("<{}>", o.tag),
                        feature: fragment.feature_name.clone(),
                    })
                }
            }
        }

        let mut seen = HashSet::new();
        for e in &incoming {
            for id in build_index(e)?.keys() {
                if let Some(existing) = origins.get(id) {
                    return Err(MergeError::DuplicateId {
                        id: id.clone(),
                        fragment_index: i,
                        existing_origin: existing.clone(),
                        new_origin: origin,
                    });
                }
                if !seen.insert(id.clone()) {
                    return Err(MergeError::DuplicateId {
                        id: id.clone(),
                        fragment_index: i,
                        existing_origin: origin.clone(),
                        new_origin: origin,
                    });
                }
            }
        }

        let index = build_index(&root)?;
        let location = index.get(&fragment.target_parent_id).ok_or_else(|| {
            MergeError::UnknownTargetParent {
                id: fragment.target_parent_id.clone(),
                fragment_index: i,
                origin: origin.clone(),
            }
        })?;
        let parent = ApplicationModel::element_mut_by_steps(&mut root, &location.steps)
            .expect("indexed location resolves");
        let at = insertion_point(parent, fragment).map_err(|reason| MergeError::BadPosition {
            fragment_index: i,
            origin: origin.clone(),
            reason,
        })?;
        for (offset, e) in incoming.iter().enumerate() {
            let mut e = (*e).clone();
            e.feature = fragment.feature_name.clone();
            parent.children.insert(at + offset, Node::Element(e));
        }
        for id in seen {
            origins.insert(id, origin.clone());
        }
        report.applied.push(AppliedFragment {
            index: i,
            origin,
            target_parent_id: fragment.target_parent_id.clone(),
            feature_name: fragment.feature_name.clone(),
            inserted: incoming.len(),
        });
    }

    let mut merged = ApplicationModel::new(root, main.source_path.clone())?;
    if main.is_fragment_only {
        merged = merged.fragment_only();
    }
    report.dangling_refs = unresolved_command_refs(&merged);
    Ok((merged, report))
}

fn insertion_point(parent: &ModelElement, fragment: &ModelFragment) -> Result<usize, String> {
    let siblings: Vec<usize> = parent
        .children
        .iter()
        .enumerate()
        .filter(|(_, n)| matches!(n, Node::Element(e) if e.feature == fragment.feature_name))
        .map(|(i, _)| i)
        .collect();
    let position_of = |id: &ElementId| {
        parent
            .children
            .iter()
            .position(|n| matches!(n, Node::Element(e) if &e.id == id))
            .ok_or_else(|| format!("`{id}` is not a child of `{}`", parent.id))
    };
    let end = || siblings.last().map_or(parent.children.len(), |&j| j + 1);
    match &fragment.position {
        Position::First => Ok(siblings.first().copied().unwrap_or(parent.children.len())),
        Position::Last => Ok(end()),
        Position::Index(n) if *n < siblings.len() => Ok(siblings[*n]),
        Position::Index(n) if *n == siblings.len() => Ok(end()),
        Position::Index(n) => Err(format!(
            "index {n} out of range, `{}` has {} `{}` children",
            parent.id,
            siblings.len(),
            fragment.feature_name
        )),
        Position::Before(id) => position_of(id),
        Position::After(id) => position_of(id).map(|j| j + 1),
    }
}

/// Command references that are missing or point at something other than a
/// Command, in document order without repeats.
pub fn unresolved_command_refs(model: &ApplicationModel) -> Vec<ElementId> {
    let mut out: Vec<ElementId> = Vec::new();
    for e in model.elements() {
        if let Some(r) = &e.command_ref {
            let ok = model.get(r).is_some_and(|t| t.kind == ElementKind::Command);
            if !ok && !out.contains(r) {
                out.push(r.clone());
            }
        }
    }
    out
}

/// A named assembly of one main model plus ordered fragment files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProductDefinition {
    pub name: String,
    pub version: String,
    #[serde(rename = "main")]
    pub main_model_path: PathBuf,
    #[serde(rename = "fragments", default)]
    pub fragment_paths: Vec<PathBuf>,
    /// Extra annotation sidecars, applied after the discovered ones.
    #[serde(rename = "annotations", default, skip_serializing_if = "Vec::is_empty")]
    pub annotation_paths: Vec<PathBuf>,
}

impl ProductDefinition {
    /// Reads a product definition; relative paths are taken relative to the
    /// definition file.
    pub fn load(path: &Path) -> Result<Self, MergeError> {
        let text = std::fs::read_to_string(path).map_err(|source| MergeError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let mut def: ProductDefinition =
            serde_json::from_str(&text).map_err(|e| MergeError::ProductDefinition {
                path: path.display().to_string(),
                message: e.to_string(),
            })?;
        let base = path.parent().unwrap_or_else(|| Path::new(""));
        def.main_model_path = base.join(&def.main_model_path);
        for p in def
            .fragment_paths
            .iter_mut()
            .chain(def.annotation_paths.iter_mut())
        {
            *p = base.join(&*p);
        }
        Ok(def)
    }
}

fn read(path: &Path) -> Result<Vec<u8>, MergeError> {
    std::fs::read(path).map_err(|source| MergeError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn load_fragment_file(path: &Path) -> Result<(Vec<ModelFragment>, ParseReport), MergeError> {
    let bytes = read(path)?;
    let shown = path.display().to_string();
    e4xmi::parse_fragment_from(&bytes, Some(&shown)).map_err(|source| MergeError::Parse {
        path: shown,
        source,
    })
}

/// Parses the product's files, merges them and requires every command
/// reference to resolve afterwards.
pub fn assemble_product(
    def: &ProductDefinition,
) -> Result<(ApplicationModel, MergeReport), MergeError> {
    let main_path = def.main_model_path.display().to_string();
    let bytes = read(&def.main_model_path)?;
    let (main, main_report) =
        e4xmi::parse_model_from(&bytes, &main_path).map_err(|source| MergeError::Parse {
            path: main_path.clone(),
            source,
        })?;
    if main.is_fragment_only {
        return Err(MergeError::FragmentOnlyMain { path: main_path });
    }

    let loaded: Vec<Result<_, MergeError>> = std::thread::scope(|scope| {
        let handles: Vec<_> = def
            .fragment_paths
            .iter()
            .map(|p| scope.spawn(move || load_fragment_file(p)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("fragment parser thread panicked"))
            .collect()
    });

    let mut sources = vec![SourceReport {
        path: main_path,
        report: main_report,
    }];
    let mut fragments = Vec::new();
    for (path, result) in def.fragment_paths.iter().zip(loaded) {
        let (frags, report) = result?;
        fragments.extend(frags);
        sources.push(SourceReport {
            path: path.display().to_string(),
            report,
        });
    }

    let (model, mut report) = merge(&main, &fragments)?;
    report.sources = sources;
    if !report.dangling_refs.is_empty() {
        return Err(MergeError::DanglingReferenceAfterMerge(
            report.dangling_refs.clone(),
        ));
    }
    Ok((model, report))
}
