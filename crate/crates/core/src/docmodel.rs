//! The document model: every element the manual talks about, together with
//! where it lives in the UI, what triggers it and what contains it.

use std::collections::HashMap;

use serde::Serialize;
use thiserror::Error;

use crate::annotations::{AnnotationSet, ApplicationMeta, SemanticAnnotation};
use crate::appmodel::{
    ApplicationModel, Category, ElementId, ElementKind, ModelElement, ModelError,
};

pub const PATH_SEPARATOR: &str = " ▸ ";

#[derive(Debug, Error, PartialEq)]
pub enum DocModelError {
    #[error("unknown element id `{0}`")]
    UnknownId(ElementId),
    #[error("`{id}` is a {kind}, not a Command")]
    NotACommand { id: ElementId, kind: ElementKind },
}

impl From<ModelError> for DocModelError {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::UnknownId(id) => DocModelError::UnknownId(id),
            other => unreachable!("lineage only fails on unknown ids: {other}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct PathSegment {
    pub kind: ElementKind,
    pub id: ElementId,
    pub label: String,
    /// Left out of the rendered text.
    pub hidden: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UiPath {
    pub segments: Vec<PathSegment>,
    pub rendered: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub enum TriggerKind {
    MenuItem,
    ToolItem,
    KeyBinding,
}

impl TriggerKind {
    pub fn of(kind: ElementKind) -> Option<Self> {
        match kind {
            ElementKind::HandledMenuItem => Some(TriggerKind::MenuItem),
            ElementKind::HandledToolItem => Some(TriggerKind::ToolItem),
            ElementKind::KeyBinding => Some(TriggerKind::KeyBinding),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Initiator {
    pub id: ElementId,
    pub trigger: TriggerKind,
    pub label: String,
    pub path: UiPath,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct DirectItem {
    pub id: ElementId,
    pub kind: ElementKind,
    pub label: String,
    pub path: UiPath,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Parameter {
    pub id: ElementId,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct DocEntry {
    pub id: ElementId,
    pub kind: ElementKind,
    pub label: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tooltip: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub icon_uri: Option<String>,
    pub annotation: Option<SemanticAnnotation>,
    pub path: UiPath,
    pub children_ids: Vec<ElementId>,
    pub initiators: Vec<Initiator>,
    pub referencers: Vec<ElementId>,
    pub groups: Vec<ElementId>,
    /// Command parameters, for commands.
    pub parameters: Vec<Parameter>,
    /// Items without a command that live inside this Part or Window.
    pub direct_items: Vec<DirectItem>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct DocumentModel {
    pub meta: ApplicationMeta,
    pub product_name: String,
    pub product_version: String,
    pub application_id: ElementId,
    pub application_label: String,
    pub windows: Vec<DocEntry>,
    pub perspectives: Vec<DocEntry>,
    pub parts: Vec<DocEntry>,
    pub commands: Vec<DocEntry>,
    pub generation_timestamp: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ProductInfo {
    pub name: String,
    pub version: String,
}

fn hidden_in_path(e: &ModelElement) -> bool {
    e.kind.is_layout()
        || (matches!(
            e.kind,
            ElementKind::Menu | ElementKind::ToolBar | ElementKind::BindingTable
        ) && e.label.as_deref().is_none_or(|l| l.trim().is_empty()))
}

fn path_from_lineage(lineage: &[&ModelElement]) -> UiPath {
    let start = lineage
        .iter()
        .position(|e| e.kind == ElementKind::Window)
        .unwrap_or(0);
    let last = lineage.len() - 1;
    let segments: Vec<PathSegment> = lineage[start..]
        .iter()
        .enumerate()
        .map(|(i, e)| PathSegment {
            kind: e.kind,
            id: e.id.clone(),
            label: e.display_label().to_string(),
            // The element itself always shows, whatever its kind.
            hidden: start + i != last && hidden_in_path(e),
        })
        .collect();
    let rendered = segments
        .iter()
        .filter(|s| !s.hidden)
        .map(|s| s.label.as_str())
        .collect::<Vec<_>>()
        .join(PATH_SEPARATOR);
    UiPath { segments, rendered }
}

/// Where `id` sits in the UI, from its outermost window (or the application
/// when no window encloses it) down to the element.
pub fn compute_path(model: &ApplicationModel, id: &ElementId) -> Result<UiPath, DocModelError> {
    Ok(path_from_lineage(&model.lineage(id)?))
}

fn sort_initiators(list: &mut [Initiator]) {
    list.sort_by(|a, b| {
        a.path
            .rendered
            .cmp(&b.path.rendered)
            .then_with(|| a.id.cmp(&b.id))
    });
}

fn initiator_of(model: &ApplicationModel, e: &ModelElement) -> Option<Initiator> {
    let trigger = TriggerKind::of(e.kind)?;
    Some(Initiator {
        id: e.id.clone(),
        trigger,
        label: e.display_label().to_string(),
        path: compute_path(model, &e.id).expect("indexed element"),
    })
}

/// Every menu item, tool item and key binding that triggers `command_id`.
pub fn compute_initiators(
    model: &ApplicationModel,
    command_id: &ElementId,
) -> Result<Vec<Initiator>, DocModelError> {
    let command = model
        .get(command_id)
        .ok_or_else(|| DocModelError::UnknownId(command_id.clone()))?;
    if command.kind != ElementKind::Command {
        return Err(DocModelError::NotACommand {
            id: command_id.clone(),
            kind: command.kind,
        });
    }
    let mut out: Vec<Initiator> = model
        .elements()
        .filter(|e| e.command_ref.as_ref() == Some(command_id))
        .filter_map(|e| initiator_of(model, e))
        .collect();
    sort_initiators(&mut out);
    Ok(out)
}

/// Visual-adjustment descendants, looking through pure layout containers.
fn visual_children(e: &ModelElement, out: &mut Vec<ElementId>) {
    for c in e.element_children() {
        if c.kind.category() != Category::VisualAdjustment {
            continue;
        }
        if c.kind.is_layout() {
            visual_children(c, out);
        } else {
            out.push(c.id.clone());
        }
    }
}

fn direct_items(model: &ApplicationModel, owner: &ModelElement, out: &mut Vec<DirectItem>) {
    for c in owner.element_children() {
        match c.kind {
            ElementKind::DirectMenuItem | ElementKind::DirectToolItem => out.push(DirectItem {
                id: c.id.clone(),
                kind: c.kind,
                label: c.display_label().to_string(),
                path: compute_path(model, &c.id).expect("indexed element"),
            }),
            // Parts and nested windows document their own items.
            ElementKind::Part | ElementKind::Window => continue,
            _ => {}
        }
        direct_items(model, c, out);
    }
}

struct Lookup<'a> {
    initiators: HashMap<&'a ElementId, Vec<&'a ModelElement>>,
    referencers: HashMap<&'a str, Vec<ElementId>>,
}

impl<'a> Lookup<'a> {
    fn new(model: &'a ApplicationModel) -> Self {
        let mut initiators: HashMap<&ElementId, Vec<&ModelElement>> = HashMap::new();
        let mut referencers: HashMap<&str, Vec<ElementId>> = HashMap::new();
        for e in model.elements() {
            if let Some(target) = &e.command_ref {
                referencers
                    .entry(target.as_str())
                    .or_default()
                    .push(e.id.clone());
                if TriggerKind::of(e.kind).is_some() {
                    initiators.entry(target).or_default().push(e);
                }
            }
            if let Some(uri) = &e.contribution_uri {
                let list = referencers.entry(uri.as_str()).or_default();
                if list.last() != Some(&e.id) {
                    list.push(e.id.clone());
                }
            }
        }
        Self {
            initiators,
            referencers,
        }
    }
}

fn entry(
    model: &ApplicationModel,
    ann: &AnnotationSet,
    lookup: &Lookup<'_>,
    e: &ModelElement,
) -> DocEntry {
    let lineage = model.lineage(&e.id).expect("indexed element");
    let groups = lineage[..lineage.len() - 1]
        .iter()
        .filter(|a| {
            matches!(
                a.kind,
                ElementKind::Menu | ElementKind::ToolBar | ElementKind::PartStack
            )
        })
        .map(|a| a.id.clone())
        .collect();
    let mut children_ids = Vec::new();
    visual_children(e, &mut children_ids);
    let mut initiators: Vec<Initiator> = lookup
        .initiators
        .get(&e.id)
        .map(|list| list.iter().filter_map(|i| initiator_of(model, i)).collect())
        .unwrap_or_default();
    sort_initiators(&mut initiators);
    let mut direct = Vec::new();
    if matches!(e.kind, ElementKind::Part | ElementKind::Window) {
        direct_items(model, e, &mut direct);
    }
    DocEntry {
        id: e.id.clone(),
        kind: e.kind,
        label: e.display_label().to_string(),
        tooltip: e.tooltip.clone(),
        icon_uri: e.icon_uri.clone(),
        annotation: ann.get(&e.id).cloned(),
        path: path_from_lineage(&lineage),
        children_ids,
        initiators,
        referencers: lookup
            .referencers
            .get(e.id.as_str())
            .cloned()
            .unwrap_or_default(),
        groups,
        parameters: e
            .element_children()
            .into_iter()
            .filter(|c| c.kind == ElementKind::CommandParameter)
            .map(|c| Parameter {
                id: c.id.clone(),
                label: c.display_label().to_string(),
            })
            .collect(),
        direct_items: direct,
    }
}

/// Builds the document model for a merged, annotated application model.
pub fn build_document_model(
    model: &ApplicationModel,
    ann: &AnnotationSet,
    product: &ProductInfo,
    generation_timestamp: &str,
) -> DocumentModel {
    let lookup = Lookup::new(model);
    let entries = |kind| -> Vec<DocEntry> {
        model
            .elements_of_kind(kind)
            .into_iter()
            .map(|e| entry(model, ann, &lookup, e))
            .collect()
    };
    let mut commands = entries(ElementKind::Command);
    commands.sort_by(|a, b| a.label.cmp(&b.label).then_with(|| a.id.cmp(&b.id)));
    let root = model.root();
    DocumentModel {
        meta: ann.meta.clone(),
        product_name: product.name.clone(),
        product_version: product.version.clone(),
        application_id: root.id.clone(),
        application_label: root.display_label().to_string(),
        windows: entries(ElementKind::Window),
        perspectives: entries(ElementKind::Perspective),
        parts: entries(ElementKind::Part),
        commands,
        generation_timestamp: generation_timestamp.to_string(),
    }
}

impl DocumentModel {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("document model serializes");
        s.push('\n');
        s
    }

    pub fn command(&self, id: &str) -> Option<&DocEntry> {
        self.commands.iter().find(|c| c.id.as_str() == id)
    }
}
