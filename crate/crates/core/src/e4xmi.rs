//! Reading and writing `.e4xmi` application models and fragment files.
//!
//! Element kinds are chosen by `xsi:type` when present, otherwise by the
//! containment feature (tag name). Namespace prefixes are not resolved against
//! their URIs; only the local part of a type name matters, which keeps files
//! from different e4 releases (whose URIs embed a year) readable.
//!
//! Serialization is canonical rather than faithful: attributes are sorted,
//! `elementId` is always written, and indentation is two spaces.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use quick_xml::events::{BytesStart, Event};
use quick_xml::Reader;
use serde::Serialize;
use thiserror::Error;

use crate::appmodel::{
    ApplicationModel, ElementId, ElementKind, ModelElement, ModelError, Node, OpaqueNode,
    Orientation,
};
use crate::diagnostics::{line_column, Warning};
use crate::merge::{feature_kinds, ModelFragment, Position};

pub const XMI_NS: &str = "http://www.omg.org/XMI";
pub const XSI_NS: &str = "http://www.w3.org/2001/XMLSchema-instance";
pub const ECRIT_NS: &str = "urn:ecrit:semantic-description";

/// Namespace declarations written on every serialized root unless the model
/// already declares the prefix.
const STANDARD_NAMESPACES: &[(&str, &str)] = &[
    ("xmlns:xmi", XMI_NS),
    ("xmlns:xsi", XSI_NS),
    (
        "xmlns:advanced",
        "http://www.eclipse.org/ui/2010/UIModel/application/ui/advanced",
    ),
    (
        "xmlns:application",
        "http://www.eclipse.org/ui/2010/UIModel/application",
    ),
    (
        "xmlns:basic",
        "http://www.eclipse.org/ui/2010/UIModel/application/ui/basic",
    ),
    (
        "xmlns:commands",
        "http://www.eclipse.org/ui/2010/UIModel/application/commands",
    ),
    (
        "xmlns:menu",
        "http://www.eclipse.org/ui/2010/UIModel/application/ui/menu",
    ),
    ("xmi:version", "2.0"),
];

const FRAGMENT_NS: &str = "http://www.eclipse.org/ui/2010/UIModel/fragment";

#[derive(Debug, Error, PartialEq)]
pub enum ParseError {
    #[error("malformed XML at line {line}, column {column}: {message}")]
    MalformedXml {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("root element <{0}> is neither an application model nor a fragment container")]
    NotAnApplicationModel(String),
    #[error("root element <{0}> is not a fragment container")]
    NotAFragmentContainer(String),
    #[error("fragment at line {line}, column {column} has no target parent id")]
    MissingTargetParentId { line: usize, column: usize },
    #[error("fragment at line {line}, column {column} has no feature name")]
    MissingFeatureName { line: usize, column: usize },
    #[error("fragment at line {line}, column {column} contributes no elements")]
    EmptyFragment { line: usize, column: usize },
    #[error("invalid positionInList `{text}` at line {line}, column {column}")]
    InvalidPosition {
        text: String,
        line: usize,
        column: usize,
    },
    #[error("<{tag}> at line {line}, column {column} has neither elementId nor xmi:id")]
    MissingId {
        tag: String,
        line: usize,
        column: usize,
    },
    #[error(transparent)]
    Model(#[from] ModelError),
}

impl ParseError {
    pub fn is_duplicate_id(&self) -> bool {
        matches!(self, ParseError::Model(ModelError::DuplicateId { .. }))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ParseReport {
    pub warnings: Vec<Warning>,
    pub dangling_refs: Vec<ElementId>,
}

/// Generic XML element tree; the first parsing stage.
#[derive(Debug)]
struct RawElement {
    name: String,
    attrs: Vec<(String, String)>,
    text: String,
    children: Vec<RawElement>,
    offset: usize,
}

impl RawElement {
    fn local_name(&self) -> &str {
        local(&self.name)
    }

    fn attr(&self, key: &str) -> Option<&str> {
        self.attrs
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    /// URI bound to this element's own prefix, if declared on it.
    fn own_namespace(&self) -> Option<&str> {
        let key = match self.name.split_once(':') {
            Some((prefix, _)) => format!("xmlns:{prefix}"),
            None => "xmlns".to_string(),
        };
        self.attr(&key)
    }
}

fn local(qname: &str) -> &str {
    qname.rsplit_once(':').map_or(qname, |(_, l)| l)
}

fn namespace_matches(uri: Option<&str>, package: &str) -> bool {
    match uri {
        None => true,
        Some(uri) => uri.trim_end_matches('/').ends_with(package),
    }
}

struct Source<'a> {
    text: &'a str,
}

impl Source<'_> {
    fn position(&self, offset: usize) -> (usize, usize) {
        line_column(self.text, offset)
    }

    fn malformed(&self, offset: usize, message: impl Into<String>) -> ParseError {
        let (line, column) = self.position(offset);
        ParseError::MalformedXml {
            line,
            column,
            message: message.into(),
        }
    }
}

fn read_raw(bytes: &[u8]) -> Result<(RawElement, Source<'_>), ParseError> {
    let text = std::str::from_utf8(bytes).map_err(|e| {
        let valid = &bytes[..e.valid_up_to()];
        let src = std::str::from_utf8(valid).unwrap_or_default();
        let (line, column) = line_column(src, src.len());
        ParseError::MalformedXml {
            line,
            column,
            message: "input is not valid UTF-8".into(),
        }
    })?;
    let source = Source { text };
    let mut reader = Reader::from_str(text);
    reader.config_mut().check_end_names = true;

    let mut stack: Vec<RawElement> = Vec::new();
    let mut root: Option<RawElement> = None;

    loop {
        let before = reader.buffer_position() as usize;
        let event = reader
            .read_event()
            .map_err(|e| source.malformed(reader.error_position() as usize, e.to_string()))?;
        let tag_offset = text[before..].find('<').map_or(before, |p| before + p);
        match event {
            Event::Start(start) => {
                let element = raw_element(&source, &start, tag_offset)?;
                if root.is_some() && stack.is_empty() {
                    return Err(source.malformed(tag_offset, "multiple root elements"));
                }
                stack.push(element);
            }
            Event::Empty(start) => {
                let element = raw_element(&source, &start, tag_offset)?;
                if root.is_some() && stack.is_empty() {
                    return Err(source.malformed(tag_offset, "multiple root elements"));
                }
                attach(&mut stack, &mut root, element);
            }
            Event::End(_) => {
                let done = stack
                    .pop()
                    .ok_or_else(|| source.malformed(tag_offset, "unexpected closing tag"))?;
                attach(&mut stack, &mut root, done);
            }
            Event::Text(t) => {
                let value = t
                    .unescape()
                    .map_err(|e| source.malformed(before, e.to_string()))?;
                match stack.last_mut() {
                    Some(top) => top.text.push_str(&value),
                    None if value.trim().is_empty() => {}
                    None => return Err(source.malformed(before, "text outside the root element")),
                }
            }
            Event::CData(c) => {
                if let Some(top) = stack.last_mut() {
                    top.text.push_str(&String::from_utf8_lossy(&c));
                }
            }
            Event::Eof => break,
            _ => {}
        }
    }
    if let Some(open) = stack.last() {
        return Err(source.malformed(
            text.len(),
            format!("unexpected end of document, <{}> is not closed", open.name),
        ));
    }
    let root = root.ok_or_else(|| source.malformed(0, "document has no root element"))?;
    Ok((root, source))
}

fn raw_element(
    source: &Source<'_>,
    start: &BytesStart<'_>,
    offset: usize,
) -> Result<RawElement, ParseError> {
    let name = String::from_utf8_lossy(start.name().as_ref()).into_owned();
    let mut attrs = Vec::new();
    for attr in start.attributes() {
        let attr = attr.map_err(|e| source.malformed(offset, e.to_string()))?;
        let key = String::from_utf8_lossy(attr.key.as_ref()).into_owned();
        let value = attr
            .unescape_value()
            .map_err(|e| source.malformed(offset, e.to_string()))?
            .into_owned();
        attrs.push((key, value));
    }
    Ok(RawElement {
        name,
        attrs,
        text: String::new(),
        children: Vec::new(),
        offset,
    })
}

fn attach(stack: &mut [RawElement], root: &mut Option<RawElement>, element: RawElement) {
    match stack.last_mut() {
        Some(parent) => parent.children.push(element),
        None => *root = Some(element),
    }
}

/// Conversion state shared across one file.
struct Converter<'a> {
    source: &'a Source<'a>,
    warnings: Vec<Warning>,
}

impl Converter<'_> {
    fn warn(&mut self, offset: usize, code: &str, message: String) {
        let (line, column) = self.source.position(offset);
        self.warnings
            .push(Warning::new(code, message).at(line, column));
    }

    /// Decides what `raw` becomes when it sits under a parent of
    /// `parent_kind`. `hint` is the content kind implied by a fragment's
    /// feature name.
    fn kind_of(
        &self,
        raw: &RawElement,
        parent_kind: Option<ElementKind>,
        hint: Option<ElementKind>,
    ) -> Option<ElementKind> {
        if let Some(ty) = raw.attr("xsi:type") {
            return ElementKind::from_type_name(local(ty));
        }
        match raw.local_name() {
            "commands" => Some(ElementKind::Command),
            "handlers" => Some(ElementKind::Handler),
            "bindingTables" => Some(ElementKind::BindingTable),
            "bindings" => Some(ElementKind::KeyBinding),
            "mainMenu" | "menus" => Some(ElementKind::Menu),
            "toolbar" => Some(ElementKind::ToolBar),
            "parameters" if parent_kind == Some(ElementKind::Command) => {
                Some(ElementKind::CommandParameter)
            }
            other => ElementKind::from_type_name(other).or(hint),
        }
    }

    fn convert(
        &mut self,
        raw: RawElement,
        parent_kind: Option<ElementKind>,
        hint: Option<ElementKind>,
    ) -> Result<Node, ParseError> {
        match self.kind_of(&raw, parent_kind, hint) {
            Some(kind) => Ok(Node::Element(self.convert_element(raw, kind)?)),
            None => Ok(Node::Opaque(self.convert_opaque(raw)?)),
        }
    }

    fn convert_opaque(&mut self, raw: RawElement) -> Result<OpaqueNode, ParseError> {
        let mut children = Vec::with_capacity(raw.children.len());
        for child in raw.children {
            children.push(self.convert(child, None, None)?);
        }
        let text = (!raw.text.trim().is_empty()).then_some(raw.text);
        Ok(OpaqueNode {
            tag: raw.name,
            attributes: raw.attrs.into_iter().collect(),
            text,
            children,
        })
    }

    fn convert_element(
        &mut self,
        raw: RawElement,
        kind: ElementKind,
    ) -> Result<ModelElement, ParseError> {
        let offset = raw.offset;
        let element_id = raw.attr("elementId").filter(|v| !v.trim().is_empty());
        let xmi_id = raw.attr("xmi:id").filter(|v| !v.trim().is_empty());
        let id = match element_id.or(xmi_id) {
            Some(v) => ElementId::new(v)?,
            None => {
                let (line, column) = self.source.position(offset);
                return Err(ParseError::MissingId {
                    tag: raw.name,
                    line,
                    column,
                });
            }
        };
        let mut element = ModelElement::new(id, kind).with_feature(raw.local_name());
        let label_key = label_attribute(kind);

        for (key, value) in raw.attrs {
            match key.as_str() {
                "elementId" => {
                    if value.trim().is_empty() {
                        self.warn(offset, "empty-element-id", "empty elementId ignored".into());
                    }
                }
                "xsi:type" => {
                    if local(&value) != kind.name() {
                        element.extra_attributes.insert(key, value);
                    }
                }
                k if k == label_key => element.label = Some(value),
                "iconURI" => element.icon_uri = Some(value),
                "tooltip" => element.tooltip = Some(value),
                "containerData" => element.container_data = Some(value),
                "contributionURI" => element.contribution_uri = Some(value),
                "horizontal" if kind == ElementKind::PartSashContainer => {
                    element.orientation = Some(match value.as_str() {
                        "true" => Orientation::Horizontal,
                        "false" => Orientation::Vertical,
                        other => {
                            self.warn(
                                offset,
                                "bad-boolean",
                                format!("horizontal=\"{other}\" is not a boolean, using vertical"),
                            );
                            Orientation::Vertical
                        }
                    });
                }
                "command" if kind.takes_command_ref() => match ElementId::new(value) {
                    Ok(r) => element.command_ref = Some(r),
                    Err(_) => self.warn(offset, "empty-ref", "empty command reference".into()),
                },
                "keySequence" if kind == ElementKind::KeyBinding => {
                    element.key_sequence = Some(value)
                }
                _ => {
                    element.extra_attributes.insert(key, value);
                }
            }
        }
        if !raw.text.trim().is_empty() {
            self.warn(
                offset,
                "ignored-text",
                format!("text content of <{}> ignored", raw.name),
            );
        }

        for child in raw.children {
            if child.local_name() == "tags" && child.attrs.is_empty() && child.children.is_empty() {
                element.tags.push(child.text);
                continue;
            }
            let node = self.convert(child, Some(kind), None)?;
            element.children.push(node);
        }
        Ok(element)
    }
}

fn label_attribute(kind: ElementKind) -> &'static str {
    match kind {
        ElementKind::Command => "commandName",
        ElementKind::CommandParameter => "name",
        _ => "label",
    }
}

/// Maps `xmi:id` values onto element ids so that references written against
/// either resolve to the same element.
fn alias_table(nodes: &[Node], out: &mut HashMap<String, ElementId>) {
    for node in nodes {
        match node {
            Node::Element(e) => {
                if let Some(xmi) = e.extra_attributes.get("xmi:id") {
                    if xmi != e.id.as_str() {
                        out.insert(xmi.clone(), e.id.clone());
                    }
                }
                alias_table(&e.children, out);
            }
            Node::Opaque(o) => alias_table(&o.children, out),
        }
    }
}

fn resolve_refs(
    nodes: &mut [Node],
    aliases: &HashMap<String, ElementId>,
    known: &dyn Fn(&ElementId) -> bool,
) {
    for node in nodes {
        match node {
            Node::Element(e) => {
                if let Some(r) = &e.command_ref {
                    if !known(r) {
                        if let Some(target) = aliases.get(r.as_str()) {
                            e.command_ref = Some(target.clone());
                        }
                    }
                }
                resolve_refs(&mut e.children, aliases, known);
            }
            Node::Opaque(o) => resolve_refs(&mut o.children, aliases, known),
        }
    }
}

fn collect_refs<'a>(nodes: &'a [Node], out: &mut Vec<&'a ElementId>) {
    for node in nodes {
        match node {
            Node::Element(e) => {
                if let Some(r) = &e.command_ref {
                    out.push(r);
                }
                collect_refs(&e.children, out);
            }
            Node::Opaque(o) => collect_refs(&o.children, out),
        }
    }
}

fn uses_ecrit_prefix(nodes: &[Node]) -> bool {
    nodes.iter().any(|n| match n {
        Node::Element(e) => {
            e.extra_attributes.keys().any(|k| k.starts_with("ecrit:"))
                || uses_ecrit_prefix(&e.children)
        }
        Node::Opaque(o) => {
            o.attributes.keys().any(|k| k.starts_with("ecrit:")) || uses_ecrit_prefix(&o.children)
        }
    })
}

/// Adds the standard namespace declarations the canonical form always carries.
fn normalize_root_namespaces(root: &mut ModelElement) {
    for (key, uri) in STANDARD_NAMESPACES {
        root.extra_attributes
            .entry(key.to_string())
            .or_insert_with(|| uri.to_string());
    }
    let ecrit_used = root
        .extra_attributes
        .keys()
        .any(|k| k.starts_with("ecrit:"))
        || uses_ecrit_prefix(&root.children);
    if ecrit_used {
        root.extra_attributes
            .entry("xmlns:ecrit".into())
            .or_insert_with(|| ECRIT_NS.into());
    }
}

/// Parses an application model file, or a fragment file (yielding a
/// fragment-only model that bundles every contributed element under a
/// synthetic application root).
pub fn parse_model(bytes: &[u8]) -> Result<(ApplicationModel, ParseReport), ParseError> {
    parse_model_from(bytes, "")
}

pub fn parse_model_from(
    bytes: &[u8],
    source_path: &str,
) -> Result<(ApplicationModel, ParseReport), ParseError> {
    let (raw, source) = read_raw(bytes)?;
    let root_local = raw.local_name().to_string();
    let mut conv = Converter {
        source: &source,
        warnings: Vec::new(),
    };

    let (mut root, fragment_only) = if root_local == "Application"
        && namespace_matches(raw.own_namespace(), "application")
    {
        match conv.convert(raw, None, None)? {
            // The root sits in no containment feature.
            Node::Element(e) => (e.with_feature(""), false),
            Node::Opaque(_) => unreachable!("Application always converts to an element"),
        }
    } else if root_local == "ModelFragments" && namespace_matches(raw.own_namespace(), "fragment") {
        let (fragments, container_attrs, _) = convert_fragments(&mut conv, raw)?;
        let id = container_attrs
            .get("xmi:id")
            .cloned()
            .unwrap_or_else(|| "fragments".to_string());
        let mut root = ModelElement::new(ElementId::new(id)?, ElementKind::Application);
        root.extra_attributes = container_attrs;
        for f in fragments {
            root.children.extend(f.elements);
        }
        (root, true)
    } else {
        return Err(ParseError::NotAnApplicationModel(raw.name));
    };

    normalize_root_namespaces(&mut root);

    let mut aliases = HashMap::new();
    alias_table(
        std::slice::from_ref(&Node::Element(root.clone())),
        &mut aliases,
    );
    let probe = ApplicationModel::new(root.clone(), source_path)?;
    let known = |id: &ElementId| probe.contains(id);
    resolve_refs(&mut root.children, &aliases, &known);

    let mut model = ApplicationModel::new(root, source_path)?;
    if fragment_only {
        model = model.fragment_only();
    }

    let mut report = ParseReport {
        warnings: conv.warnings,
        dangling_refs: Vec::new(),
    };
    let mut refs = Vec::new();
    collect_refs(&model.root().children, &mut refs);
    for r in refs {
        if !model.contains(r) && !report.dangling_refs.contains(r) {
            report.warnings.push(Warning::new(
                "dangling-ref",
                format!("command reference `{r}` does not resolve within this file"),
            ));
            report.dangling_refs.push(r.clone());
        }
    }
    Ok((model, report))
}

/// Parses a fragment container file into its fragment entries.
pub fn parse_fragment(bytes: &[u8]) -> Result<(Vec<ModelFragment>, ParseReport), ParseError> {
    parse_fragment_from(bytes, None)
}

pub fn parse_fragment_from(
    bytes: &[u8],
    source_path: Option<&str>,
) -> Result<(Vec<ModelFragment>, ParseReport), ParseError> {
    let (raw, source) = read_raw(bytes)?;
    if raw.local_name() != "ModelFragments" || !namespace_matches(raw.own_namespace(), "fragment") {
        return Err(ParseError::NotAFragmentContainer(raw.name));
    }
    let mut conv = Converter {
        source: &source,
        warnings: Vec::new(),
    };
    let (mut fragments, _, mut aliases) = convert_fragments(&mut conv, raw)?;

    // References may use xmi:ids of the fragment's own elements or imports.
    let mut local_ids = std::collections::HashSet::new();
    for f in &fragments {
        alias_table(&f.elements, &mut aliases);
        collect_ids(&f.elements, &mut local_ids);
    }
    let known = |id: &ElementId| local_ids.contains(id);
    let mut report = ParseReport {
        warnings: conv.warnings,
        dangling_refs: Vec::new(),
    };
    for f in &mut fragments {
        resolve_refs(&mut f.elements, &aliases, &known);
        f.source = source_path.map(str::to_string);
        let mut refs = Vec::new();
        collect_refs(&f.elements, &mut refs);
        for r in refs {
            if !local_ids.contains(r) && !report.dangling_refs.contains(r) {
                report.dangling_refs.push(r.clone());
            }
        }
    }
    Ok((fragments, report))
}

fn collect_ids(nodes: &[Node], out: &mut std::collections::HashSet<ElementId>) {
    for node in nodes {
        match node {
            Node::Element(e) => {
                out.insert(e.id.clone());
                collect_ids(&e.children, out);
            }
            Node::Opaque(o) => collect_ids(&o.children, out),
        }
    }
}

fn convert_fragments(
    conv: &mut Converter<'_>,
    raw: RawElement,
) -> Result<FragmentContainer, ParseError> {
    let container_attrs: BTreeMap<String, String> = raw.attrs.into_iter().collect();
    let mut fragments = Vec::new();
    let mut imports = HashMap::new();
    for entry in raw.children {
        match entry.local_name() {
            "fragments" => fragments.push(convert_fragment_entry(conv, entry)?),
            // Imports name elements from elsewhere by elementId under a local xmi:id.
            "imports" => {
                if let (Some(xmi), Some(eid)) = (entry.attr("xmi:id"), entry.attr("elementId")) {
                    if let Ok(id) = ElementId::new(eid) {
                        imports.insert(xmi.to_string(), id);
                    }
                }
            }
            other => conv.warn(
                entry.offset,
                "ignored-element",
                format!("<{other}> in fragment container ignored"),
            ),
        }
    }
    Ok((fragments, container_attrs, imports))
}

type FragmentContainer = (
    Vec<ModelFragment>,
    BTreeMap<String, String>,
    HashMap<String, ElementId>,
);

fn convert_fragment_entry(
    conv: &mut Converter<'_>,
    entry: RawElement,
) -> Result<ModelFragment, ParseError> {
    let (line, column) = conv.source.position(entry.offset);
    let target = entry
        .attr("targetParentId")
        .or_else(|| entry.attr("parentElementId"))
        .filter(|v| !v.trim().is_empty())
        .ok_or(ParseError::MissingTargetParentId { line, column })?;
    let target_parent_id = ElementId::new(target)?;
    let feature_name = entry
        .attr("featurename")
        .or_else(|| entry.attr("featureName"))
        .filter(|v| !v.trim().is_empty())
        .ok_or(ParseError::MissingFeatureName { line, column })?
        .to_string();
    let position = match entry.attr("positionInList") {
        None => Position::Last,
        Some(text) => Position::parse(text).ok_or_else(|| ParseError::InvalidPosition {
            text: text.to_string(),
            line,
            column,
        })?,
    };
    let hint = feature_kinds(&feature_name).and_then(|kinds| match kinds {
        [single] => Some(*single),
        _ => None,
    });

    let mut extra_attributes = BTreeMap::new();
    for (k, v) in &entry.attrs {
        if !matches!(
            k.as_str(),
            "targetParentId"
                | "parentElementId"
                | "featurename"
                | "featureName"
                | "positionInList"
                | "xsi:type"
        ) {
            extra_attributes.insert(k.clone(), v.clone());
        }
    }

    let mut elements = Vec::new();
    for child in entry.children {
        if child.local_name() == "elements" {
            let mut node = conv.convert(child, None, hint)?;
            if let Node::Element(e) = &mut node {
                e.feature = feature_name.clone();
            }
            elements.push(node);
        } else {
            conv.warn(
                child.offset,
                "ignored-element",
                format!("<{}> in fragment entry ignored", child.name),
            );
        }
    }
    if elements.is_empty() {
        return Err(ParseError::EmptyFragment { line, column });
    }
    Ok(ModelFragment {
        target_parent_id,
        feature_name,
        position,
        elements,
        source: None,
        extra_attributes,
    })
}

/// Writes the canonical `.e4xmi` form of a model.
pub fn serialize_model(model: &ApplicationModel) -> String {
    let mut root = model.root().clone();
    normalize_root_namespaces(&mut root);
    let mut out = String::from("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    write_element(&mut out, &root, 0, true, "application:Application");
    out
}

/// Writes fragments as a canonical fragment container file.
pub fn serialize_fragments(fragments: &[ModelFragment]) -> String {
    let mut out = String::from("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    let mut attrs: BTreeMap<String, String> = STANDARD_NAMESPACES
        .iter()
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect();
    attrs.insert("xmlns:fragment".into(), FRAGMENT_NS.into());
    let ecrit_used = fragments.iter().any(|f| uses_ecrit_prefix(&f.elements));
    if ecrit_used {
        attrs.insert("xmlns:ecrit".into(), ECRIT_NS.into());
    }
    open_tag(&mut out, 0, "fragment:ModelFragments", &attrs, false);
    for f in fragments {
        let mut fattrs = f.extra_attributes.clone();
        fattrs.insert("xsi:type".into(), "fragment:StringModelFragment".into());
        fattrs.insert("featurename".into(), f.feature_name.clone());
        fattrs.insert("parentElementId".into(), f.target_parent_id.to_string());
        fattrs.insert("positionInList".into(), f.position.to_string());
        open_tag(&mut out, 1, "fragments", &fattrs, false);
        for node in &f.elements {
            match node {
                Node::Element(e) => write_element(&mut out, e, 2, false, "elements"),
                Node::Opaque(o) => write_opaque(&mut out, o, 2),
            }
        }
        close_tag(&mut out, 1, "fragments");
    }
    close_tag(&mut out, 0, "fragment:ModelFragments");
    out
}

fn package_prefix(kind: ElementKind) -> &'static str {
    use ElementKind::*;
    match kind {
        Application => "application",
        Window | Part | PartStack | PartSashContainer => "basic",
        Perspective | PerspectiveStack => "advanced",
        Menu | MenuItem | HandledMenuItem | DirectMenuItem | ToolBar | HandledToolItem
        | DirectToolItem | MenuSeparator => "menu",
        Command | CommandParameter | Handler | KeyBinding | BindingTable => "commands",
    }
}

fn element_attributes(e: &ModelElement, is_root: bool) -> BTreeMap<String, String> {
    let mut attrs = e.extra_attributes.clone();
    if !is_root && !attrs.contains_key("xsi:type") {
        attrs.insert(
            "xsi:type".into(),
            format!("{}:{}", package_prefix(e.kind), e.kind.name()),
        );
    }
    attrs.insert("elementId".into(), e.id.to_string());
    let mut set = |k: &str, v: &Option<String>| {
        if let Some(v) = v {
            attrs.insert(k.to_string(), v.clone());
        }
    };
    set(label_attribute(e.kind), &e.label);
    set("iconURI", &e.icon_uri);
    set("tooltip", &e.tooltip);
    set("containerData", &e.container_data);
    set("contributionURI", &e.contribution_uri);
    set("keySequence", &e.key_sequence);
    set("command", &e.command_ref.as_ref().map(|r| r.to_string()));
    if e.orientation == Some(Orientation::Horizontal) {
        attrs.insert("horizontal".into(), "true".into());
    }
    attrs
}

fn write_element(out: &mut String, e: &ModelElement, depth: usize, is_root: bool, tag: &str) {
    let attrs = element_attributes(e, is_root);
    let leaf = e.children.is_empty() && e.tags.is_empty();
    open_tag(out, depth, tag, &attrs, leaf);
    if leaf {
        return;
    }
    for t in &e.tags {
        indent(out, depth + 1);
        let _ = writeln!(out, "<tags>{}</tags>", escape_text(t));
    }
    for child in &e.children {
        match child {
            Node::Element(c) => write_element(out, c, depth + 1, false, &c.feature),
            Node::Opaque(o) => write_opaque(out, o, depth + 1),
        }
    }
    close_tag(out, depth, tag);
}

fn write_opaque(out: &mut String, o: &OpaqueNode, depth: usize) {
    match (&o.text, o.children.is_empty()) {
        (None, true) => open_tag(out, depth, &o.tag, &o.attributes, true),
        (Some(text), true) => {
            indent(out, depth);
            out.push('<');
            out.push_str(&o.tag);
            write_attrs(out, &o.attributes);
            let _ = writeln!(out, ">{}</{}>", escape_text(text), o.tag);
        }
        (text, false) => {
            open_tag(out, depth, &o.tag, &o.attributes, false);
            if let Some(text) = text {
                indent(out, depth + 1);
                out.push_str(&escape_text(text));
                out.push('\n');
            }
            for child in &o.children {
                match child {
                    Node::Element(c) => write_element(out, c, depth + 1, false, &c.feature),
                    Node::Opaque(inner) => write_opaque(out, inner, depth + 1),
                }
            }
            close_tag(out, depth, &o.tag);
        }
    }
}

fn indent(out: &mut String, depth: usize) {
    for _ in 0..depth {
        out.push_str("  ");
    }
}

fn write_attrs(out: &mut String, attrs: &BTreeMap<String, String>) {
    for (k, v) in attrs {
        let _ = write!(out, " {}=\"{}\"", k, escape_attr(v));
    }
}

fn open_tag(
    out: &mut String,
    depth: usize,
    tag: &str,
    attrs: &BTreeMap<String, String>,
    self_closing: bool,
) {
    indent(out, depth);
    out.push('<');
    out.push_str(tag);
    write_attrs(out, attrs);
    out.push_str(if self_closing { "/>\n" } else { ">\n" });
}

fn close_tag(out: &mut String, depth: usize, tag: &str) {
    indent(out, depth);
    let _ = writeln!(out, "</{tag}>");
}

fn escape_text(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '\r' => out.push_str("&#13;"),
            c => out.push(c),
        }
    }
    out
}

fn escape_attr(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\n' => out.push_str("&#10;"),
            '\r' => out.push_str("&#13;"),
            '\t' => out.push_str("&#9;"),
            c => out.push(c),
        }
    }
    out
}
