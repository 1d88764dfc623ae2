//! Semantic descriptions attached to model elements.
//!
//! Descriptions come from two places: a JSON sidecar next to the model
//! (`<model-stem>.ecrit.json`) and `ecrit:*` attributes stored inline in the
//! model. [`combine`] merges both with the sidecar taking precedence.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::appmodel::{ApplicationModel, ElementId, ElementKind};
use crate::diagnostics::Warning;

pub const SIDECAR_SUFFIX: &str = ".ecrit.json";

pub const INLINE_DESCRIPTION: &str = "ecrit:description";
pub const INLINE_PRECONDITION: &str = "ecrit:precondition";
pub const INLINE_POSTCONDITION: &str = "ecrit:postcondition";
pub const INLINE_ACTORS: &str = "ecrit:actors";
pub const INLINE_ABOUT: &str = "ecrit:about";
pub const INLINE_MULTIUSER: &str = "ecrit:multiuser";
pub const INLINE_LOGIN: &str = "ecrit:login";
pub const INLINE_AUDIENCE: &str = "ecrit:audience";
pub const INLINE_PURPOSE: &str = "ecrit:purpose";

/// Kinds whose elements are expected to carry a description.
pub const DOCUMENTABLE_KINDS: [ElementKind; 4] = [
    ElementKind::Command,
    ElementKind::Part,
    ElementKind::Perspective,
    ElementKind::Window,
];

#[derive(Debug, Error, PartialEq)]
pub enum AnnotationError {
    #[error("malformed annotation document: {0}")]
    MalformedDocument(String),
    #[error("empty description for element `{0}`")]
    EmptyDescription(ElementId),
    #[error("`{id}` is a {kind}; preconditions and postconditions apply to commands only")]
    NotACommand { id: ElementId, kind: ElementKind },
    #[error("unknown annotation field `{field}` (expected one of: {expected})")]
    UnknownField { field: String, expected: String },
    #[error("field `{0}` needs an element id")]
    MissingElement(String),
    #[error("field `{0}` applies to the application, not to an element")]
    UnexpectedElement(String),
    #[error("`{value}` is not a boolean for field `{field}` (use true or false)")]
    BadBoolean { field: String, value: String },
}

/// Application-wide documentation content.
///
/// Unset fields are `None` so that merging can tell "not given" apart from an
/// explicit value; the accessors apply the defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct ApplicationMeta {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub about: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub is_multi_user: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub requires_login: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub audience: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub purpose: Option<String>,
}

impl ApplicationMeta {
    pub fn about(&self) -> &str {
        self.about.as_deref().unwrap_or("")
    }

    pub fn is_multi_user(&self) -> bool {
        self.is_multi_user.unwrap_or(false)
    }

    pub fn requires_login(&self) -> bool {
        self.requires_login.unwrap_or(false)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct SemanticAnnotation {
    #[serde(skip)]
    pub element_id: Option<ElementId>,
    pub description: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub precondition: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub postcondition: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub actors: Option<Vec<String>>,
}

impl SemanticAnnotation {
    pub fn new(id: ElementId, description: impl Into<String>) -> Self {
        Self {
            element_id: Some(id),
            description: description.into(),
            precondition: None,
            postcondition: None,
            actors: None,
        }
    }

    fn has_conditions(&self) -> bool {
        self.precondition.is_some() || self.postcondition.is_some()
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct AnnotationSet {
    pub meta: ApplicationMeta,
    pub entries: BTreeMap<ElementId, SemanticAnnotation>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SidecarDocument {
    #[serde(default)]
    meta: ApplicationMeta,
    #[serde(default)]
    elements: BTreeMap<String, SemanticAnnotation>,
}

/// Loads a sidecar annotation document.
pub fn load_annotations(bytes: &[u8]) -> Result<AnnotationSet, AnnotationError> {
    let doc: SidecarDocument = serde_json::from_slice(bytes)
        .map_err(|e| AnnotationError::MalformedDocument(e.to_string()))?;
    let mut set = AnnotationSet {
        meta: doc.meta,
        entries: BTreeMap::new(),
    };
    for (key, mut entry) in doc.elements {
        let id = ElementId::new(key)
            .map_err(|_| AnnotationError::MalformedDocument("empty element id key".into()))?;
        if entry.description.trim().is_empty() {
            return Err(AnnotationError::EmptyDescription(id));
        }
        entry.element_id = Some(id.clone());
        set.entries.insert(id, entry);
    }
    Ok(set)
}

impl AnnotationSet {
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty() && self.meta == ApplicationMeta::default()
    }

    pub fn get(&self, id: &ElementId) -> Option<&SemanticAnnotation> {
        self.entries.get(id)
    }

    pub fn insert(&mut self, annotation: SemanticAnnotation) {
        let id = annotation
            .element_id
            .clone()
            .expect("annotations inserted into a set carry their element id");
        self.entries.insert(id, annotation);
    }

    /// Sidecar JSON form; stable key order.
    pub fn to_json(&self) -> String {
        let doc = SidecarDocument {
            meta: self.meta.clone(),
            elements: self
                .entries
                .iter()
                .map(|(k, v)| (k.to_string(), v.clone()))
                .collect(),
        };
        let mut text = serde_json::to_string_pretty(&doc).expect("annotation set serializes");
        text.push('\n');
        text
    }

    /// Checks the set against a (merged) model. Entries for unknown ids are
    /// warnings; conditions on non-commands are errors.
    pub fn validate_against(
        &self,
        model: &ApplicationModel,
    ) -> Result<Vec<Warning>, AnnotationError> {
        let mut warnings = Vec::new();
        for (id, entry) in &self.entries {
            match model.get(id) {
                None => warnings.push(Warning::new(
                    "unresolved-annotation",
                    format!("annotation for `{id}` does not match any element of the model"),
                )),
                Some(e) if entry.has_conditions() && e.kind != ElementKind::Command => {
                    return Err(AnnotationError::NotACommand {
                        id: id.clone(),
                        kind: e.kind,
                    })
                }
                Some(_) => {}
            }
        }
        Ok(warnings)
    }

    /// Sets one field, as the `annotate` command does. `element` is required
    /// for element fields and must be absent for application fields.
    pub fn set_field(
        &mut self,
        element: Option<&ElementId>,
        field: &str,
        value: &str,
    ) -> Result<(), AnnotationError> {
        const ELEMENT_FIELDS: [&str; 4] =
            ["description", "precondition", "postcondition", "actors"];
        const META_FIELDS: [&str; 5] = [
            "about",
            "isMultiUser",
            "requiresLogin",
            "audience",
            "purpose",
        ];
        let field = field.strip_prefix("meta.").unwrap_or(field);

        if META_FIELDS.contains(&field) {
            if element.is_some() {
                return Err(AnnotationError::UnexpectedElement(field.to_string()));
            }
            let boolean = || match value {
                "true" => Ok(true),
                "false" => Ok(false),
                other => Err(AnnotationError::BadBoolean {
                    field: field.to_string(),
                    value: other.to_string(),
                }),
            };
            match field {
                "about" => self.meta.about = Some(value.to_string()),
                "audience" => self.meta.audience = Some(value.to_string()),
                "purpose" => self.meta.purpose = Some(value.to_string()),
                "isMultiUser" => self.meta.is_multi_user = Some(boolean()?),
                _ => self.meta.requires_login = Some(boolean()?),
            }
            return Ok(());
        }
        if !ELEMENT_FIELDS.contains(&field) {
            return Err(AnnotationError::UnknownField {
                field: field.to_string(),
                expected: ELEMENT_FIELDS
                    .iter()
                    .chain(META_FIELDS.iter())
                    .copied()
                    .collect::<Vec<_>>()
                    .join(", "),
            });
        }
        let id = element.ok_or_else(|| AnnotationError::MissingElement(field.to_string()))?;

        if field == "description" {
            if value.trim().is_empty() {
                return Err(AnnotationError::EmptyDescription(id.clone()));
            }
            self.entries
                .entry(id.clone())
                .and_modify(|e| e.description = value.to_string())
                .or_insert_with(|| SemanticAnnotation::new(id.clone(), value));
            return Ok(());
        }
        // Other fields need an existing description to hang off.
        let entry = self
            .entries
            .get_mut(id)
            .ok_or_else(|| AnnotationError::EmptyDescription(id.clone()))?;
        match field {
            "precondition" => entry.precondition = Some(value.to_string()),
            "postcondition" => entry.postcondition = Some(value.to_string()),
            _ => entry.actors = Some(split_actors(value)),
        }
        Ok(())
    }
}

fn split_actors(value: &str) -> Vec<String> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(str::to_string)
        .collect()
}

fn inline_boolean(key: &str, value: &str, warnings: &mut Vec<Warning>) -> Option<bool> {
    match value {
        "true" => Some(true),
        "false" => Some(false),
        other => {
            warnings.push(Warning::new(
                "bad-boolean",
                format!("{key}=\"{other}\" is not `true` or `false`; treated as false"),
            ));
            None
        }
    }
}

/// Reads the `ecrit:*` attributes stored inside the model.
pub fn extract_inline_annotations(model: &ApplicationModel) -> (AnnotationSet, Vec<Warning>) {
    let mut set = AnnotationSet::default();
    let mut warnings = Vec::new();
    let root = &model.root().extra_attributes;
    set.meta.about = root.get(INLINE_ABOUT).cloned();
    set.meta.audience = root.get(INLINE_AUDIENCE).cloned();
    set.meta.purpose = root.get(INLINE_PURPOSE).cloned();
    if let Some(v) = root.get(INLINE_MULTIUSER) {
        set.meta.is_multi_user = inline_boolean(INLINE_MULTIUSER, v, &mut warnings);
    }
    if let Some(v) = root.get(INLINE_LOGIN) {
        set.meta.requires_login = inline_boolean(INLINE_LOGIN, v, &mut warnings);
    }

    for e in model.elements() {
        let attrs = &e.extra_attributes;
        let description = attrs.get(INLINE_DESCRIPTION);
        let precondition = attrs.get(INLINE_PRECONDITION).cloned();
        let postcondition = attrs.get(INLINE_POSTCONDITION).cloned();
        let actors = attrs.get(INLINE_ACTORS).map(|v| split_actors(v));
        let any = description.is_some()
            || precondition.is_some()
            || postcondition.is_some()
            || actors.is_some();
        if !any {
            continue;
        }
        match description.filter(|d| !d.trim().is_empty()) {
            Some(d) => set.insert(SemanticAnnotation {
                element_id: Some(e.id.clone()),
                description: d.clone(),
                precondition,
                postcondition,
                actors,
            }),
            None => warnings.push(Warning::new(
                "missing-description",
                format!(
                    "inline annotation on `{}` has no description and is ignored",
                    e.id
                ),
            )),
        }
    }
    (set, warnings)
}

fn pick<T: Clone + PartialEq + std::fmt::Debug>(
    what: &str,
    primary: &Option<T>,
    secondary: &Option<T>,
    warnings: &mut Vec<Warning>,
) -> Option<T> {
    if let (Some(a), Some(b)) = (primary, secondary) {
        if a != b {
            warnings.push(Warning::new(
                "annotation-conflict",
                format!("{what}: sidecar value {a:?} overrides inline value {b:?}"),
            ));
        }
    }
    primary.clone().or_else(|| secondary.clone())
}

/// Field-wise union of two sets; `sidecar` wins where both define a field.
pub fn combine(sidecar: &AnnotationSet, inline: &AnnotationSet) -> (AnnotationSet, Vec<Warning>) {
    let mut w = Vec::new();
    let meta = ApplicationMeta {
        about: pick(
            "meta.about",
            &sidecar.meta.about,
            &inline.meta.about,
            &mut w,
        ),
        is_multi_user: pick(
            "meta.isMultiUser",
            &sidecar.meta.is_multi_user,
            &inline.meta.is_multi_user,
            &mut w,
        ),
        requires_login: pick(
            "meta.requiresLogin",
            &sidecar.meta.requires_login,
            &inline.meta.requires_login,
            &mut w,
        ),
        audience: pick(
            "meta.audience",
            &sidecar.meta.audience,
            &inline.meta.audience,
            &mut w,
        ),
        purpose: pick(
            "meta.purpose",
            &sidecar.meta.purpose,
            &inline.meta.purpose,
            &mut w,
        ),
    };
    let mut entries = inline.entries.clone();
    for (id, s) in &sidecar.entries {
        let merged = match inline.entries.get(id) {
            None => s.clone(),
            Some(i) => SemanticAnnotation {
                element_id: Some(id.clone()),
                description: pick(
                    &format!("{id}.description"),
                    &Some(s.description.clone()),
                    &Some(i.description.clone()),
                    &mut w,
                )
                .unwrap_or_default(),
                precondition: pick(
                    &format!("{id}.precondition"),
                    &s.precondition,
                    &i.precondition,
                    &mut w,
                ),
                postcondition: pick(
                    &format!("{id}.postcondition"),
                    &s.postcondition,
                    &i.postcondition,
                    &mut w,
                ),
                actors: pick(&format!("{id}.actors"), &s.actors, &i.actors, &mut w),
            },
        };
        entries.insert(id.clone(), merged);
    }
    (AnnotationSet { meta, entries }, w)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MissingDocumentation {
    pub id: ElementId,
    pub kind: ElementKind,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct CoverageReport {
    pub total_documentable: usize,
    pub annotated: usize,
    pub coverage_ratio: f64,
    pub missing: Vec<MissingDocumentation>,
}

impl CoverageReport {
    pub fn from_counts(total: usize, missing: Vec<MissingDocumentation>) -> Self {
        let annotated = total - missing.len();
        Self {
            total_documentable: total,
            annotated,
            coverage_ratio: if total == 0 {
                0.0
            } else {
                annotated as f64 / total as f64
            },
            missing,
        }
    }
}

/// How many documentable elements carry a description.
pub fn coverage(model: &ApplicationModel, ann: &AnnotationSet) -> CoverageReport {
    let mut total = 0;
    let mut missing = Vec::new();
    for e in model
        .elements()
        .filter(|e| DOCUMENTABLE_KINDS.contains(&e.kind))
    {
        total += 1;
        let documented = ann
            .get(&e.id)
            .is_some_and(|a| !a.description.trim().is_empty());
        if !documented {
            missing.push(MissingDocumentation {
                id: e.id.clone(),
                kind: e.kind,
            });
        }
    }
    CoverageReport::from_counts(total, missing)
}
