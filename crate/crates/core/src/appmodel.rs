//! Typed representation of an e4 application model.
//!
//! The model is a containment tree of [`ModelElement`]s rooted at an
//! `Application`. Elements of kinds outside the supported taxonomy are kept as
//! [`OpaqueNode`]s so that nothing read from a file is lost on the way back out.
//! Opaque nodes are never indexed, but recognized elements nested inside them
//! are.

use std::collections::BTreeMap;
use std::fmt;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Identifier of a model element, unique within one combined model.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ElementId(String);

impl ElementId {
    pub fn new(value: impl Into<String>) -> Result<Self, ModelError> {
        let value = value.into();
        if value.trim().is_empty() {
            return Err(ModelError::EmptyId);
        }
        Ok(Self(value))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for ElementId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl AsRef<str> for ElementId {
    fn as_ref(&self) -> &str {
        &self.0
    }
}

/// The element kinds the documentation pipeline understands.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ElementKind {
    Application,
    Window,
    PerspectiveStack,
    Perspective,
    PartSashContainer,
    PartStack,
    Part,
    Menu,
    MenuItem,
    HandledMenuItem,
    DirectMenuItem,
    ToolBar,
    HandledToolItem,
    DirectToolItem,
    Command,
    CommandParameter,
    Handler,
    KeyBinding,
    BindingTable,
    MenuSeparator,
}

impl ElementKind {
    pub const ALL: [ElementKind; 20] = [
        ElementKind::Application,
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
        ElementKind::ToolBar,
        ElementKind::HandledToolItem,
        ElementKind::DirectToolItem,
        ElementKind::Command,
        ElementKind::CommandParameter,
        ElementKind::Handler,
        ElementKind::KeyBinding,
        ElementKind::BindingTable,
        ElementKind::MenuSeparator,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ElementKind::Application => "Application",
            ElementKind::Window => "Window",
            ElementKind::PerspectiveStack => "PerspectiveStack",
            ElementKind::Perspective => "Perspective",
            ElementKind::PartSashContainer => "PartSashContainer",
            ElementKind::PartStack => "PartStack",
            ElementKind::Part => "Part",
            ElementKind::Menu => "Menu",
            ElementKind::MenuItem => "MenuItem",
            ElementKind::HandledMenuItem => "HandledMenuItem",
            ElementKind::DirectMenuItem => "DirectMenuItem",
            ElementKind::ToolBar => "ToolBar",
            ElementKind::HandledToolItem => "HandledToolItem",
            ElementKind::DirectToolItem => "DirectToolItem",
            ElementKind::Command => "Command",
            ElementKind::CommandParameter => "CommandParameter",
            ElementKind::Handler => "Handler",
            ElementKind::KeyBinding => "KeyBinding",
            ElementKind::BindingTable => "BindingTable",
            ElementKind::MenuSeparator => "MenuSeparator",
        }
    }

    /// Looks up a kind by its e4 type name (the local part of an `xsi:type`).
    pub fn from_type_name(name: &str) -> Option<Self> {
        // TrimmedWindow is the concrete window type most applications use.
        if name == "TrimmedWindow" {
            return Some(ElementKind::Window);
        }
        Self::ALL.iter().copied().find(|k| k.name() == name)
    }

    pub fn category(self) -> Category {
        category_of(self)
    }

    /// Whether the element may carry a command reference.
    pub fn takes_command_ref(self) -> bool {
        matches!(
            self,
            ElementKind::HandledMenuItem
                | ElementKind::HandledToolItem
                | ElementKind::Handler
                | ElementKind::KeyBinding
        )
    }

    /// Pure layout containers that carry no meaning for the reader.
    pub fn is_layout(self) -> bool {
        matches!(
            self,
            ElementKind::PartSashContainer | ElementKind::PerspectiveStack | ElementKind::PartStack
        )
    }

    /// Containment feature used when an element of this kind is created
    /// without an explicit one.
    pub fn default_feature(self) -> &'static str {
        match self {
            ElementKind::Application => "",
            ElementKind::Command => "commands",
            ElementKind::CommandParameter => "parameters",
            ElementKind::Handler => "handlers",
            ElementKind::KeyBinding => "bindings",
            ElementKind::BindingTable => "bindingTables",
            ElementKind::ToolBar => "toolbar",
            ElementKind::Menu => "menus",
            _ => "children",
        }
    }
}

impl fmt::Display for ElementKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// The six element categories of the application model taxonomy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Category {
    VisualAdjustment,
    ActionInitiation,
    ActionExecution,
    DynamicElement,
    ExtensionElement,
    MetaElement,
}

impl Category {
    pub const ALL: [Category; 6] = [
        Category::VisualAdjustment,
        Category::ActionInitiation,
        Category::ActionExecution,
        Category::DynamicElement,
        Category::ExtensionElement,
        Category::MetaElement,
    ];
}

/// Maps every supported kind onto its category.
///
/// Assignments for kinds the taxonomy does not name explicitly (Application,
/// MenuSeparator, KeyBinding, ...) are a reading of the category definitions.
pub fn category_of(kind: ElementKind) -> Category {
    use ElementKind::*;
    match kind {
        Application | Window | PerspectiveStack | Perspective | PartSashContainer | PartStack
        | Part | Menu | ToolBar | MenuSeparator => Category::VisualAdjustment,
        MenuItem | HandledMenuItem | DirectMenuItem | HandledToolItem | DirectToolItem => {
            Category::ActionInitiation
        }
        Command | CommandParameter | Handler | KeyBinding | BindingTable => {
            Category::ActionExecution
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Orientation {
    Horizontal,
    Vertical,
}

/// A node of the containment tree.
#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Element(ModelElement),
    Opaque(OpaqueNode),
}

impl Node {
    pub fn as_element(&self) -> Option<&ModelElement> {
        match self {
            Node::Element(e) => Some(e),
            Node::Opaque(_) => None,
        }
    }

    fn children(&self) -> &[Node] {
        match self {
            Node::Element(e) => &e.children,
            Node::Opaque(o) => &o.children,
        }
    }

    fn children_mut(&mut self) -> &mut Vec<Node> {
        match self {
            Node::Element(e) => &mut e.children,
            Node::Opaque(o) => &mut o.children,
        }
    }
}

impl From<ModelElement> for Node {
    fn from(e: ModelElement) -> Self {
        Node::Element(e)
    }
}

/// An XML element whose kind is outside the supported set, kept verbatim.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct OpaqueNode {
    /// Qualified tag name as it appeared in the source.
    pub tag: String,
    pub attributes: BTreeMap<String, String>,
    pub text: Option<String>,
    pub children: Vec<Node>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelElement {
    pub id: ElementId,
    pub kind: ElementKind,
    /// Containment feature (XML tag) under which the element sits in its parent.
    pub feature: String,
    pub label: Option<String>,
    pub icon_uri: Option<String>,
    pub tooltip: Option<String>,
    pub container_data: Option<String>,
    pub orientation: Option<Orientation>,
    pub command_ref: Option<ElementId>,
    pub contribution_uri: Option<String>,
    pub key_sequence: Option<String>,
    pub tags: Vec<String>,
    pub extra_attributes: BTreeMap<String, String>,
    pub children: Vec<Node>,
}

impl ModelElement {
    pub fn new(id: ElementId, kind: ElementKind) -> Self {
        Self {
            id,
            kind,
            feature: kind.default_feature().to_string(),
            label: None,
            icon_uri: None,
            tooltip: None,
            container_data: None,
            orientation: (kind == ElementKind::PartSashContainer).then_some(Orientation::Vertical),
            command_ref: None,
            contribution_uri: None,
            key_sequence: None,
            tags: Vec::new(),
            extra_attributes: BTreeMap::new(),
            children: Vec::new(),
        }
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = Some(label.into());
        self
    }

    pub fn with_feature(mut self, feature: impl Into<String>) -> Self {
        self.feature = feature.into();
        self
    }

    pub fn with_command(mut self, command: ElementId) -> Self {
        self.command_ref = Some(command);
        self
    }

    pub fn with_child(mut self, child: impl Into<Node>) -> Self {
        self.children.push(child.into());
        self
    }

    /// Label shown to readers: the label, a key binding's key sequence, or
    /// the id as a last resort.
    pub fn display_label(&self) -> &str {
        self.label
            .as_deref()
            .filter(|l| !l.trim().is_empty())
            .or(self.key_sequence.as_deref())
            .unwrap_or(self.id.as_str())
    }

    /// Recognized elements directly below this one, looking through opaque
    /// wrappers.
    pub fn element_children(&self) -> Vec<&ModelElement> {
        let mut out = Vec::new();
        collect_element_children(&self.children, &mut out);
        out
    }

    /// Checks the per-element structural invariants.
    pub fn validate_shape(&self) -> Result<(), ModelError> {
        if self.command_ref.is_some() && !self.kind.takes_command_ref() {
            return Err(ModelError::UnexpectedCommandRef(self.id.clone(), self.kind));
        }
        if self.orientation.is_some() != (self.kind == ElementKind::PartSashContainer) {
            return Err(ModelError::UnexpectedOrientation(
                self.id.clone(),
                self.kind,
            ));
        }
        Ok(())
    }
}

fn collect_element_children<'a>(nodes: &'a [Node], out: &mut Vec<&'a ModelElement>) {
    for node in nodes {
        match node {
            Node::Element(e) => out.push(e),
            Node::Opaque(o) => collect_element_children(&o.children, out),
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("element id must not be empty")]
    EmptyId,
    #[error("duplicate element id `{id}` at {first} and {second}")]
    DuplicateId {
        id: ElementId,
        first: String,
        second: String,
    },
    #[error("model root must be an Application, found {0}")]
    RootNotApplication(ElementKind),
    #[error("element `{0}` of kind {1} cannot reference a command")]
    UnexpectedCommandRef(ElementId, ElementKind),
    #[error("element `{0}` of kind {1} has an inconsistent orientation")]
    UnexpectedOrientation(ElementId, ElementKind),
    #[error("unknown element id `{0}`")]
    UnknownId(ElementId),
}

/// Where an indexed element lives in the tree.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Location {
    /// Child positions from the root down to the element.
    pub steps: Vec<usize>,
    /// Nearest recognized ancestor.
    pub parent: Option<ElementId>,
}

pub type ElementIndex = IndexMap<ElementId, Location>;

/// Indexes every recognized element reachable from `root`, in pre-order.
pub fn build_index(root: &ModelElement) -> Result<ElementIndex, ModelError> {
    let mut index = IndexMap::new();
    let mut trail = vec![root.id.as_str().to_string()];
    index.insert(
        root.id.clone(),
        Location {
            steps: Vec::new(),
            parent: None,
        },
    );
    let mut steps = Vec::new();
    index_children(&root.children, &root.id, &mut steps, &mut trail, &mut index)?;
    Ok(index)
}

fn index_children(
    nodes: &[Node],
    parent: &ElementId,
    steps: &mut Vec<usize>,
    trail: &mut Vec<String>,
    index: &mut ElementIndex,
) -> Result<(), ModelError> {
    for (i, node) in nodes.iter().enumerate() {
        steps.push(i);
        match node {
            Node::Element(e) => {
                trail.push(e.id.as_str().to_string());
                if let Some(existing) = index.get(&e.id) {
                    let first = trail_of(index, &e.id, existing);
                    return Err(ModelError::DuplicateId {
                        id: e.id.clone(),
                        first,
                        second: trail.join("/"),
                    });
                }
                index.insert(
                    e.id.clone(),
                    Location {
                        steps: steps.clone(),
                        parent: Some(parent.clone()),
                    },
                );
                index_children(&e.children, &e.id, steps, trail, index)?;
                trail.pop();
            }
            Node::Opaque(o) => {
                trail.push(o.tag.clone());
                index_children(&o.children, parent, steps, trail, index)?;
                trail.pop();
            }
        }
        steps.pop();
    }
    Ok(())
}

fn trail_of(index: &ElementIndex, id: &ElementId, loc: &Location) -> String {
    let mut parts = vec![id.as_str().to_string()];
    let mut parent = loc.parent.clone();
    while let Some(p) = parent {
        parts.push(p.as_str().to_string());
        parent = index.get(&p).and_then(|l| l.parent.clone());
    }
    parts.reverse();
    parts.join("/")
}

/// An indexed application model (or the synthetic wrapper around a fragment
/// file).
#[derive(Debug, Clone, PartialEq)]
pub struct ApplicationModel {
    root: ModelElement,
    index: ElementIndex,
    pub source_path: String,
    pub is_fragment_only: bool,
}

impl ApplicationModel {
    pub fn new(root: ModelElement, source_path: impl Into<String>) -> Result<Self, ModelError> {
        if root.kind != ElementKind::Application {
            return Err(ModelError::RootNotApplication(root.kind));
        }
        let index = build_index(&root)?;
        let model = Self {
            root,
            index,
            source_path: source_path.into(),
            is_fragment_only: false,
        };
        for e in model.elements() {
            e.validate_shape()?;
        }
        Ok(model)
    }

    pub fn fragment_only(mut self) -> Self {
        self.is_fragment_only = true;
        self
    }

    pub fn root(&self) -> &ModelElement {
        &self.root
    }

    pub fn into_root(self) -> ModelElement {
        self.root
    }

    pub fn index(&self) -> &ElementIndex {
        &self.index
    }

    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }

    pub fn contains(&self, id: &ElementId) -> bool {
        self.index.contains_key(id)
    }

    pub fn get(&self, id: &ElementId) -> Option<&ModelElement> {
        let loc = self.index.get(id)?;
        let mut node_children: &[Node] = &self.root.children;
        let mut current = &self.root;
        for &step in &loc.steps {
            let node = node_children.get(step)?;
            if let Node::Element(e) = node {
                current = e;
            }
            node_children = node.children();
        }
        Some(current)
    }

    pub fn parent_of(&self, id: &ElementId) -> Option<&ModelElement> {
        let parent = self.index.get(id)?.parent.as_ref()?;
        self.get(parent)
    }

    /// Ancestors from the root down to (and including) `id`.
    pub fn lineage(&self, id: &ElementId) -> Result<Vec<&ModelElement>, ModelError> {
        if !self.contains(id) {
            return Err(ModelError::UnknownId(id.clone()));
        }
        let mut chain = Vec::new();
        let mut cursor = Some(id.clone());
        while let Some(current) = cursor {
            let e = self
                .get(&current)
                .ok_or_else(|| ModelError::UnknownId(current.clone()))?;
            chain.push(e);
            cursor = self.index[&current].parent.clone();
        }
        chain.reverse();
        Ok(chain)
    }

    /// All indexed elements in document (pre-order) order.
    pub fn elements(&self) -> impl Iterator<Item = &ModelElement> + '_ {
        self.index.keys().filter_map(move |id| self.get(id))
    }

    pub fn elements_of_kind(&self, kind: ElementKind) -> Vec<&ModelElement> {
        elements_of_kind(self, kind)
    }

    /// Mutable access to an element by its child-position path from the root.
    pub(crate) fn element_mut_by_steps<'a>(
        root: &'a mut ModelElement,
        steps: &[usize],
    ) -> Option<&'a mut ModelElement> {
        let Some((&last, prefix)) = steps.split_last() else {
            return Some(root);
        };
        let mut nodes = &mut root.children;
        for &step in prefix {
            nodes = nodes.get_mut(step)?.children_mut();
        }
        match nodes.get_mut(last)? {
            Node::Element(e) => Some(e),
            Node::Opaque(_) => None,
        }
    }
}

pub fn elements_of_kind(model: &ApplicationModel, kind: ElementKind) -> Vec<&ModelElement> {
    model.elements().filter(|e| e.kind == kind).collect()
}

/// Pre-order walk over every node (recognized and opaque) below `root`.
pub fn walk_nodes<'a>(root: &'a ModelElement, mut visit: impl FnMut(&'a Node)) {
    fn go<'a>(nodes: &'a [Node], visit: &mut impl FnMut(&'a Node)) {
        for n in nodes {
            visit(n);
            go(n.children(), visit);
        }
    }
    go(&root.children, &mut visit);
}
