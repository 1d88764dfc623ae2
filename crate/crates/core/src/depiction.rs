//! Perspective layout images.
//!
//! A perspective is laid out by recursive subdivision of the canvas: sash
//! containers split along their axis by `containerData` weight, part stacks
//! and parts become labeled boxes.

use std::fmt::Write as _;

use serde::Serialize;
use thiserror::Error;

use crate::appmodel::{ElementId, ElementKind, ModelElement, Orientation};
use crate::diagnostics::Warning;
use crate::outputters::RenderedArtifact;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum DepictionError {
    #[error("`{id}` is a {kind}, not a Perspective")]
    NotAPerspective { id: ElementId, kind: ElementKind },
    #[error("`{id}` would be drawn {width}x{height} px, below the {min}x{min} px minimum")]
    DegenerateArea {
        id: ElementId,
        width: i64,
        height: i64,
        min: i64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct DepictionConfig {
    pub canvas_width: u32,
    pub canvas_height: u32,
    pub margin: u32,
    pub font_size: u32,
    /// Smallest width and height a box may have.
    pub min_rect: u32,
}

impl Default for DepictionConfig {
    fn default() -> Self {
        Self {
            canvas_width: 800,
            canvas_height: 600,
            margin: 4,
            font_size: 14,
            min_rect: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct LayoutRect {
    pub x: u32,
    pub y: u32,
    pub width: u32,
    pub height: u32,
    pub label: String,
    pub element_id: ElementId,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Layout {
    pub rects: Vec<LayoutRect>,
    pub warnings: Vec<Warning>,
}

#[derive(Clone, Copy)]
struct Area {
    x: i64,
    y: i64,
    w: i64,
    h: i64,
}

fn drawable(kind: ElementKind) -> bool {
    matches!(
        kind,
        ElementKind::Part | ElementKind::PartStack | ElementKind::PartSashContainer
    )
}

/// Parses `containerData` weights; missing or bad values take the mean of the
/// valid ones, so with no valid weight at all every child gets an equal share.
fn weights(children: &[&ModelElement], warnings: &mut Vec<Warning>) -> Vec<f64> {
    let parsed: Vec<Option<f64>> = children
        .iter()
        .map(|c| match c.container_data.as_deref().map(str::trim) {
            None | Some("") => None,
            Some(text) => match text.parse::<u64>() {
                Ok(v) if v > 0 => Some(v as f64),
                _ => {
                    warnings.push(Warning::new(
                        "bad-container-data",
                        format!(
                            "containerData \"{text}\" on `{}` is not a positive integer weight; using an equal share",
                            c.id
                        ),
                    ));
                    None
                }
            },
        })
        .collect();
    let valid: Vec<f64> = parsed.iter().flatten().copied().collect();
    let fill = if valid.is_empty() {
        1.0
    } else {
        valid.iter().sum::<f64>() / valid.len() as f64
    };
    parsed.into_iter().map(|w| w.unwrap_or(fill)).collect()
}

struct Layouter<'a> {
    config: &'a DepictionConfig,
    rects: Vec<LayoutRect>,
    warnings: Vec<Warning>,
}

impl Layouter<'_> {
    fn check(&self, id: &ElementId, a: Area) -> Result<(), DepictionError> {
        let min = i64::from(self.config.min_rect.max(1));
        if a.w < min || a.h < min {
            return Err(DepictionError::DegenerateArea {
                id: id.clone(),
                width: a.w,
                height: a.h,
                min,
            });
        }
        Ok(())
    }

    fn leaf(&mut self, e: &ModelElement, label: String, a: Area) -> Result<(), DepictionError> {
        self.check(&e.id, a)?;
        self.rects.push(LayoutRect {
            x: a.x as u32,
            y: a.y as u32,
            width: a.w as u32,
            height: a.h as u32,
            label,
            element_id: e.id.clone(),
        });
        Ok(())
    }

    fn split(
        &mut self,
        owner: &ElementId,
        children: &[&ModelElement],
        orientation: Orientation,
        a: Area,
    ) -> Result<(), DepictionError> {
        if children.is_empty() {
            self.warnings.push(Warning::new(
                "empty-container",
                format!("`{owner}` has nothing to draw"),
            ));
            return Ok(());
        }
        let ws = weights(children, &mut self.warnings);
        let total: f64 = ws.iter().sum();
        let margin = i64::from(self.config.margin);
        let length = match orientation {
            Orientation::Horizontal => a.w,
            Orientation::Vertical => a.h,
        };
        let available = length - margin * (children.len() as i64 - 1);
        let mut acc = 0.0;
        let mut prev = 0i64;
        for (k, (child, w)) in children.iter().zip(&ws).enumerate() {
            acc += w;
            let end = if k + 1 == children.len() {
                available
            } else {
                (available as f64 * acc / total).round() as i64
            };
            let offset = prev + k as i64 * margin;
            let size = end - prev;
            prev = end;
            let sub = match orientation {
                Orientation::Horizontal => Area {
                    x: a.x + offset,
                    w: size,
                    ..a
                },
                Orientation::Vertical => Area {
                    y: a.y + offset,
                    h: size,
                    ..a
                },
            };
            self.place(child, sub)?;
        }
        Ok(())
    }

    fn place(&mut self, e: &ModelElement, a: Area) -> Result<(), DepictionError> {
        self.check(&e.id, a)?;
        match e.kind {
            ElementKind::PartSashContainer => {
                let children: Vec<_> = e
                    .element_children()
                    .into_iter()
                    .filter(|c| drawable(c.kind))
                    .collect();
                self.split(
                    &e.id,
                    &children,
                    e.orientation.unwrap_or(Orientation::Vertical),
                    a,
                )
            }
            ElementKind::PartStack => {
                let parts: Vec<_> = e
                    .element_children()
                    .into_iter()
                    .filter(|c| c.kind == ElementKind::Part)
                    .collect();
                let label = match parts.first() {
                    None => e.display_label().to_string(),
                    Some(p) if parts.len() > 1 => {
                        format!("{} ({} tabs)", p.display_label(), parts.len())
                    }
                    Some(p) => p.display_label().to_string(),
                };
                self.leaf(e, label, a)
            }
            _ => self.leaf(e, e.display_label().to_string(), a),
        }
    }
}

/// Lays out the boxes of one perspective. Only leaf boxes are returned.
pub fn layout_perspective(
    perspective: &ModelElement,
    config: &DepictionConfig,
) -> Result<Layout, DepictionError> {
    if perspective.kind != ElementKind::Perspective {
        return Err(DepictionError::NotAPerspective {
            id: perspective.id.clone(),
            kind: perspective.kind,
        });
    }
    let m = i64::from(config.margin);
    let canvas = Area {
        x: m,
        y: m,
        w: i64::from(config.canvas_width) - 2 * m,
        h: i64::from(config.canvas_height) - 2 * m,
    };
    let mut l = Layouter {
        config,
        rects: Vec::new(),
        warnings: Vec::new(),
    };
    let children: Vec<_> = perspective
        .element_children()
        .into_iter()
        .filter(|c| drawable(c.kind))
        .collect();
    if children.is_empty() {
        l.warnings.push(Warning::new(
            "empty-perspective",
            format!("perspective `{}` contains no parts", perspective.id),
        ));
    } else {
        l.check(&perspective.id, canvas)?;
        l.split(&perspective.id, &children, Orientation::Vertical, canvas)?;
    }
    Ok(Layout {
        rects: l.rects,
        warnings: l.warnings,
    })
}

/// Label shortened with a trailing ellipsis so that its estimated width
/// (0.6 x font size per character) fits `width`.
pub fn fit_label(label: &str, width: u32, font_size: u32) -> String {
    let per_char = 0.6 * f64::from(font_size.max(1));
    let max = (f64::from(width) / per_char).floor() as usize;
    let count = label.chars().count();
    if count <= max {
        return label.to_string();
    }
    if max == 0 {
        return String::new();
    }
    let mut s: String = label.chars().take(max - 1).collect();
    s.push('…');
    s
}

/// File-name stem for a perspective's images: letters, digits, `.` and `-`.
pub fn depiction_stem(perspective: &ElementId) -> String {
    perspective
        .as_str()
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '.' || c == '-' {
                c
            } else {
                '-'
            }
        })
        .collect()
}

pub fn depiction_file_name(perspective: &ElementId) -> String {
    format!("{}.svg", depiction_stem(perspective))
}

pub fn render_depiction_svg(
    perspective: &ElementId,
    rects: &[LayoutRect],
    config: &DepictionConfig,
) -> RenderedArtifact {
    let (w, h) = (config.canvas_width, config.canvas_height);
    let mut s = String::new();
    s.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    let _ = writeln!(
        s,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">"
    );
    let _ = writeln!(
        s,
        "  <rect x=\"0\" y=\"0\" width=\"{w}\" height=\"{h}\" fill=\"#ffffff\" stroke=\"#000000\" stroke-width=\"1\"/>"
    );
    for r in rects {
        let _ = writeln!(
            s,
            "  <rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"#eef2f7\" stroke=\"#33475b\" stroke-width=\"1\"/>",
            r.x, r.y, r.width, r.height
        );
        let cx = f64::from(r.x) + f64::from(r.width) / 2.0;
        let cy = f64::from(r.y) + f64::from(r.height) / 2.0;
        let _ = writeln!(
            s,
            "  <text x=\"{cx}\" y=\"{cy}\" font-family=\"sans-serif\" font-size=\"{}\" text-anchor=\"middle\" dominant-baseline=\"middle\">{}</text>",
            config.font_size,
            quick_xml::escape::escape(fit_label(&r.label, r.width, config.font_size).as_str())
        );
    }
    s.push_str("</svg>\n");
    RenderedArtifact {
        path: depiction_file_name(perspective),
        content: s.into_bytes(),
        media_type: "image/svg+xml".to_string(),
    }
}

/// The same boxes as a LaTeX `picture`, scaled to the line width.
pub fn render_depiction_latex(
    perspective: &ElementId,
    rects: &[LayoutRect],
    config: &DepictionConfig,
) -> RenderedArtifact {
    let (w, h) = (config.canvas_width, config.canvas_height);
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{{\\setlength{{\\unitlength}}{{{:.6}\\linewidth}}%",
        1.0 / f64::from(w.max(1))
    );
    let _ = writeln!(s, "\\begin{{picture}}({w},{h})");
    let _ = writeln!(s, "\\put(0,0){{\\framebox({w},{h}){{}}}}");
    for r in rects {
        let label =
            crate::outputters::escape::latex(&fit_label(&r.label, r.width, config.font_size));
        let _ = writeln!(
            s,
            "\\put({},{}){{\\framebox({},{}){{\\footnotesize {label}}}}}",
            r.x,
            h.saturating_sub(r.y + r.height),
            r.width,
            r.height
        );
    }
    s.push_str("\\end{picture}}\n");
    RenderedArtifact {
        path: format!("{}-layout.tex", depiction_stem(perspective)),
        content: s.into_bytes(),
        media_type: "application/x-tex".to_string(),
    }
}

/// Layout outcome of one perspective, as handed to the outputters.
#[derive(Debug, Clone, PartialEq)]
pub struct PerspectiveDepiction {
    pub perspective: ElementId,
    pub outcome: Result<Layout, DepictionError>,
}

/// Lays out every perspective of the model, in parallel.
pub fn depict_perspectives(
    model: &crate::appmodel::ApplicationModel,
    config: &DepictionConfig,
) -> Vec<PerspectiveDepiction> {
    let perspectives = model.elements_of_kind(ElementKind::Perspective);
    std::thread::scope(|scope| {
        let handles: Vec<_> = perspectives
            .iter()
            .map(|p| {
                scope.spawn(move || PerspectiveDepiction {
                    perspective: p.id.clone(),
                    outcome: layout_perspective(p, config),
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("layout thread panicked"))
            .collect()
    })
}
