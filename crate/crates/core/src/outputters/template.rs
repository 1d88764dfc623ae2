//! A small text-replacement template language.
//!
//! * `${a.b.c}` substitutes a value from the render context, escaped for the
//!   target format.
//! * `$for(list) ... $end` repeats its body per list entry; inside, `item`
//!   names the current entry (an inner loop shadows an outer one).
//! * `$if(present:path) ... $end` keeps its body when the value exists and is
//!   not null, false, empty text or an empty list.
//! * `$include(name)` renders another template of the same bundle.
//!
//! A block directive standing alone on its line takes the whole line with it.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde_json::Value;
use thiserror::Error;

use crate::diagnostics::{line_column, Warning};

const MAX_INCLUDE_DEPTH: usize = 16;

#[derive(Debug, Error, PartialEq)]
pub enum TemplateError {
    #[error("{template}:{line}: unknown placeholder `${{{path}}}`")]
    UnknownPlaceholder {
        template: String,
        path: String,
        line: usize,
    },
    #[error("{template}:{line}: `{directive}` is never closed with $end")]
    Unterminated {
        template: String,
        directive: String,
        line: usize,
    },
    #[error("{template}:{line}: $end without an open block")]
    UnmatchedEnd { template: String, line: usize },
    #[error("{template}:{line}: malformed directive `{text}`")]
    BadDirective {
        template: String,
        text: String,
        line: usize,
    },
    #[error("{template}:{line}: `{path}` is not a list")]
    NotAList {
        template: String,
        path: String,
        line: usize,
    },
    #[error("template `{0}` not found in the bundle")]
    MissingTemplate(String),
    #[error("templates include each other more than {MAX_INCLUDE_DEPTH} levels deep (at `{0}`)")]
    IncludeTooDeep(String),
    #[error("cannot read template {path}: {message}")]
    Io { path: String, message: String },
}

#[derive(Debug, Clone, PartialEq)]
enum Piece {
    Text(String),
    Var {
        path: String,
        line: usize,
    },
    For {
        path: String,
        line: usize,
        body: Vec<Piece>,
    },
    If {
        path: String,
        line: usize,
        body: Vec<Piece>,
    },
    Include {
        name: String,
        line: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Template {
    pub name: String,
    pieces: Vec<Piece>,
}

enum Directive {
    For(String),
    If(String),
    Include(String),
    End,
}

fn scan_directive(rest: &str) -> Option<Result<(Directive, usize), String>> {
    let with_arg = |prefix: &str| -> Option<Result<(String, usize), String>> {
        let body = rest.strip_prefix(prefix)?;
        Some(match body.find(')') {
            Some(close) if !body[..close].contains('\n') && !body[..close].trim().is_empty() => {
                Ok((body[..close].trim().to_string(), prefix.len() + close + 1))
            }
            _ => Err(rest.lines().next().unwrap_or(rest).to_string()),
        })
    };
    if let Some(r) = with_arg("$for(") {
        return Some(r.map(|(a, n)| (Directive::For(a), n)));
    }
    if let Some(r) = with_arg("$if(") {
        return Some(r.and_then(|(a, n)| match a.strip_prefix("present:") {
            Some(p) if !p.trim().is_empty() => Ok((Directive::If(p.trim().to_string()), n)),
            _ => Err(format!("$if({a})")),
        }));
    }
    if let Some(r) = with_arg("$include(") {
        return Some(r.map(|(a, n)| (Directive::Include(a), n)));
    }
    if let Some(after) = rest.strip_prefix("$end") {
        let boundary = after
            .chars()
            .next()
            .is_none_or(|c| !(c.is_alphanumeric() || c == '_'));
        if boundary {
            return Some(Ok((Directive::End, 4)));
        }
    }
    None
}

struct Frame {
    directive: Option<(Directive, usize)>,
    pieces: Vec<Piece>,
}

impl Template {
    pub fn parse(name: impl Into<String>, source: &str) -> Result<Self, TemplateError> {
        let name = name.into();
        let line_of = |offset: usize| line_column(source, offset).0;
        let mut stack = vec![Frame {
            directive: None,
            pieces: Vec::new(),
        }];
        let mut text = String::new();
        let flush = |text: &mut String, stack: &mut Vec<Frame>| {
            if !text.is_empty() {
                let t = std::mem::take(text);
                stack
                    .last_mut()
                    .expect("root frame")
                    .pieces
                    .push(Piece::Text(t));
            }
        };
        let mut i = 0;
        while i < source.len() {
            let rest = &source[i..];
            if let Some(body) = rest.strip_prefix("${") {
                let close = body
                    .find('}')
                    .filter(|&c| !body[..c].contains('\n') && !body[..c].trim().is_empty())
                    .ok_or_else(|| TemplateError::BadDirective {
                        template: name.clone(),
                        text: rest.lines().next().unwrap_or(rest).to_string(),
                        line: line_of(i),
                    })?;
                flush(&mut text, &mut stack);
                stack
                    .last_mut()
                    .expect("root frame")
                    .pieces
                    .push(Piece::Var {
                        path: body[..close].trim().to_string(),
                        line: line_of(i),
                    });
                i += 2 + close + 1;
                continue;
            }
            let Some(found) = scan_directive(rest) else {
                let c = rest.chars().next().expect("non-empty rest");
                text.push(c);
                i += c.len_utf8();
                continue;
            };
            let line = line_of(i);
            let (directive, len) = found.map_err(|text| TemplateError::BadDirective {
                template: name.clone(),
                text,
                line,
            })?;
            let line_start = source[..i].rfind('\n').map_or(0, |p| p + 1);
            let after = &source[i + len..];
            let line_end = after.find('\n').map_or(after.len(), |p| p + 1);
            let alone =
                source[line_start..i].trim().is_empty() && after[..line_end].trim().is_empty();
            if alone {
                text.truncate(text.len() - (i - line_start));
                i += len + line_end;
            } else {
                i += len;
            }
            flush(&mut text, &mut stack);
            match directive {
                Directive::End => {
                    if stack.len() == 1 {
                        return Err(TemplateError::UnmatchedEnd {
                            template: name,
                            line,
                        });
                    }
                    let frame = stack.pop().expect("checked depth");
                    let (opened, line) = frame.directive.expect("only the root has no directive");
                    let piece = match opened {
                        Directive::For(path) => Piece::For {
                            path,
                            line,
                            body: frame.pieces,
                        },
                        Directive::If(path) => Piece::If {
                            path,
                            line,
                            body: frame.pieces,
                        },
                        _ => unreachable!("only blocks are pushed"),
                    };
                    stack.last_mut().expect("root frame").pieces.push(piece);
                }
                Directive::Include(n) => stack
                    .last_mut()
                    .expect("root frame")
                    .pieces
                    .push(Piece::Include { name: n, line }),
                block => stack.push(Frame {
                    directive: Some((block, line)),
                    pieces: Vec::new(),
                }),
            }
        }
        flush(&mut text, &mut stack);
        if stack.len() > 1 {
            let (d, line) = stack.pop().and_then(|f| f.directive).expect("open block");
            let directive = match d {
                Directive::For(p) => format!("$for({p})"),
                Directive::If(p) => format!("$if(present:{p})"),
                _ => unreachable!("only blocks are pushed"),
            };
            return Err(TemplateError::Unterminated {
                template: name,
                directive,
                line,
            });
        }
        Ok(Self {
            name,
            pieces: stack.pop().expect("root frame").pieces,
        })
    }
}

/// Named template sources, `manual.tpl` being the entry point.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TemplateBundle {
    pub files: BTreeMap<String, String>,
}

pub const ENTRY_TEMPLATE: &str = "manual.tpl";

fn bundle_key(name: &str) -> String {
    if name.ends_with(".tpl") {
        name.to_string()
    } else {
        format!("{name}.tpl")
    }
}

impl TemplateBundle {
    pub fn from_pairs(pairs: &[(&str, &str)]) -> Self {
        Self {
            files: pairs
                .iter()
                .map(|(k, v)| (bundle_key(k), v.to_string()))
                .collect(),
        }
    }

    /// Reads every `*.tpl` file of a directory.
    pub fn from_dir(dir: &Path) -> Result<Self, TemplateError> {
        let io = |e: std::io::Error| TemplateError::Io {
            path: dir.display().to_string(),
            message: e.to_string(),
        };
        let mut files = BTreeMap::new();
        for entry in fs::read_dir(dir).map_err(io)? {
            let path = entry.map_err(io)?.path();
            if path.extension().is_some_and(|e| e == "tpl") && path.is_file() {
                let text = fs::read_to_string(&path).map_err(|e| TemplateError::Io {
                    path: path.display().to_string(),
                    message: e.to_string(),
                })?;
                let name = path
                    .file_name()
                    .expect("file")
                    .to_string_lossy()
                    .into_owned();
                files.insert(name, text);
            }
        }
        Ok(Self { files })
    }

    /// Replaces or adds the templates of `other`.
    pub fn overlay(mut self, other: TemplateBundle) -> Self {
        self.files.extend(other.files);
        self
    }

    pub fn insert(&mut self, name: &str, body: impl Into<String>) {
        self.files.insert(bundle_key(name), body.into());
    }

    pub fn template(&self, name: &str) -> Result<Template, TemplateError> {
        let key = bundle_key(name);
        let body = self
            .files
            .get(&key)
            .ok_or_else(|| TemplateError::MissingTemplate(key.clone()))?;
        Template::parse(key, body)
    }
}

pub struct RenderOptions<'a> {
    pub escape: fn(&str) -> String,
    pub strict: bool,
    /// Text for missing annotation fields; `{id}` becomes the element id.
    pub missing_annotation: &'a str,
    pub bundle: Option<&'a TemplateBundle>,
}

pub const DEFAULT_MISSING_ANNOTATION: &str = "(no description provided — element id: {id})";

fn lookup<'v>(start: &'v Value, segments: &[&str]) -> Option<&'v Value> {
    segments.iter().try_fold(start, |v, s| match v {
        Value::Object(map) => map.get(*s),
        Value::Array(list) => s.parse::<usize>().ok().and_then(|i| list.get(i)),
        _ => None,
    })
}

fn present(v: Option<&Value>) -> bool {
    match v {
        None | Some(Value::Null) | Some(Value::Bool(false)) => false,
        Some(Value::String(s)) => !s.is_empty(),
        Some(Value::Array(a)) => !a.is_empty(),
        Some(_) => true,
    }
}

fn scalar_text(v: &Value) -> Option<String> {
    match v {
        Value::String(s) => Some(s.clone()),
        Value::Number(n) => Some(n.to_string()),
        Value::Bool(b) => Some(b.to_string()),
        Value::Array(items) => items
            .iter()
            .map(|i| match i {
                Value::Array(_) | Value::Object(_) | Value::Null => None,
                other => scalar_text(other),
            })
            .collect::<Option<Vec<_>>>()
            .map(|parts| parts.join(", ")),
        Value::Null | Value::Object(_) => None,
    }
}

struct Renderer<'a> {
    opts: &'a RenderOptions<'a>,
    root: &'a Value,
    warnings: Vec<Warning>,
}

impl<'a> Renderer<'a> {
    fn resolve(&self, path: &str, scopes: &[&'a Value]) -> (Option<&'a Value>, Option<&'a Value>) {
        let segments: Vec<&str> = path.split('.').collect();
        let (start, rest) = match (segments[0], scopes.last()) {
            ("item", Some(item)) => (*item, &segments[1..]),
            _ => (self.root, &segments[..]),
        };
        let value = lookup(start, rest);
        // For `x.annotation.field` remember `x`, whose id names the placeholder.
        let owner = rest
            .iter()
            .position(|s| *s == "annotation")
            .and_then(|k| lookup(start, &rest[..k]));
        (value, owner)
    }

    fn unknown(
        &mut self,
        tpl: &str,
        path: &str,
        line: usize,
        out: &mut String,
    ) -> Result<(), TemplateError> {
        if self.opts.strict {
            return Err(TemplateError::UnknownPlaceholder {
                template: tpl.to_string(),
                path: path.to_string(),
                line,
            });
        }
        self.warnings.push(
            Warning::new(
                "unknown-placeholder",
                format!("{tpl}: `${{{path}}}` does not resolve; kept as is"),
            )
            .at(line, 1),
        );
        out.push_str("${");
        out.push_str(path);
        out.push('}');
        Ok(())
    }

    fn render(
        &mut self,
        tpl: &str,
        pieces: &[Piece],
        scopes: &mut Vec<&'a Value>,
        depth: usize,
        out: &mut String,
    ) -> Result<(), TemplateError> {
        for piece in pieces {
            match piece {
                Piece::Text(t) => out.push_str(t),
                Piece::Var { path, line } => {
                    let (value, owner) = self.resolve(path, scopes);
                    match value.and_then(scalar_text) {
                        Some(text) => out.push_str(&(self.opts.escape)(&text)),
                        None => match owner.and_then(|o| o.get("id")).and_then(Value::as_str) {
                            Some(id) => {
                                let text = self.opts.missing_annotation.replace("{id}", id);
                                out.push_str(&(self.opts.escape)(&text));
                            }
                            None => self.unknown(tpl, path, *line, out)?,
                        },
                    }
                }
                Piece::If { path, body, .. } => {
                    if present(self.resolve(path, scopes).0) {
                        self.render(tpl, body, scopes, depth, out)?;
                    }
                }
                Piece::For { path, line, body } => match self.resolve(path, scopes).0 {
                    Some(Value::Array(items)) => {
                        for item in items {
                            scopes.push(item);
                            let r = self.render(tpl, body, scopes, depth, out);
                            scopes.pop();
                            r?;
                        }
                    }
                    Some(Value::Null) => {}
                    None if !self.opts.strict => self.warnings.push(
                        Warning::new(
                            "unknown-placeholder",
                            format!("{tpl}: $for({path}) does not resolve"),
                        )
                        .at(*line, 1),
                    ),
                    None => {
                        return Err(TemplateError::UnknownPlaceholder {
                            template: tpl.to_string(),
                            path: path.clone(),
                            line: *line,
                        })
                    }
                    Some(_) => {
                        return Err(TemplateError::NotAList {
                            template: tpl.to_string(),
                            path: path.clone(),
                            line: *line,
                        })
                    }
                },
                Piece::Include { name, .. } => {
                    if depth >= MAX_INCLUDE_DEPTH {
                        return Err(TemplateError::IncludeTooDeep(name.clone()));
                    }
                    let bundle = self
                        .opts
                        .bundle
                        .ok_or_else(|| TemplateError::MissingTemplate(bundle_key(name)))?;
                    let included = bundle.template(name)?;
                    self.render(&included.name, &included.pieces, scopes, depth + 1, out)?;
                }
            }
        }
        Ok(())
    }
}

/// Renders `tpl` against a JSON context.
pub fn render_template(
    tpl: &Template,
    context: &Value,
    opts: &RenderOptions<'_>,
) -> Result<(String, Vec<Warning>), TemplateError> {
    let mut r = Renderer {
        opts,
        root: context,
        warnings: Vec::new(),
    };
    let mut out = String::new();
    r.render(&tpl.name, &tpl.pieces, &mut Vec::new(), 0, &mut out)?;
    Ok((out, r.warnings))
}
