//! Helpers shared by the integration test targets.
#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use ecrit::appmodel::{
    ApplicationModel, ElementId, ElementKind, ModelElement, Node, OpaqueNode, Orientation,
};
use ecrit::merge::{ModelFragment, Position};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

pub fn fixture(name: &str) -> PathBuf {
    fixtures().join(name)
}

/// Every `.e4xmi` file below the fixture directory, sorted.
pub fn corpus() -> Vec<PathBuf> {
    ecrit::analyzer::discover_models(&fixtures())
}

pub fn id(s: &str) -> ElementId {
    ElementId::new(s).unwrap()
}

const WORDS: &[&str] = &[
    "Open", "Save", "Orders", "Stock", "Edit", "View", "Help", "Report", "Main", "Tools", "Print",
    "Close", "Sync", "Export",
];

/// Seeded generator of structurally plausible application models.
pub struct ModelGen {
    rng: ChaCha8Rng,
    next: usize,
    count: usize,
    cap: usize,
    commands: Vec<ElementId>,
    /// Sprinkle unrecognized nodes (leaves and wrappers) into the tree.
    pub opaque: bool,
}

impl ModelGen {
    /// `cap` bounds the number of indexed elements, root included.
    pub fn new(seed: u64, cap: usize) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            next: 0,
            count: 0,
            cap,
            commands: Vec::new(),
            opaque: false,
        }
    }

    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }

    pub fn fresh_id(&mut self, prefix: &str) -> ElementId {
        self.next += 1;
        id(&format!("{prefix}.{}", self.next))
    }

    fn label(&mut self) -> Option<String> {
        match self.rng.random_range(0..8) {
            0 => None,
            1 => Some(String::new()),
            _ => {
                let w = WORDS[self.rng.random_range(0..WORDS.len())];
                Some(format!("{w} {}", self.rng.random_range(0..100)))
            }
        }
    }

    fn element(&mut self, kind: ElementKind) -> Option<ModelElement> {
        if self.count >= self.cap {
            return None;
        }
        self.count += 1;
        let prefix = kind.name().to_ascii_lowercase();
        let id = self.fresh_id(&prefix);
        let mut e = ModelElement::new(id, kind);
        e.label = self.label();
        if kind.takes_command_ref() {
            e.command_ref = Some(self.command_ref());
        }
        if kind == ElementKind::KeyBinding {
            e.key_sequence = Some(format!(
                "M1+{}",
                (b'A' + self.rng.random_range(0..26u8)) as char
            ));
        }
        if kind == ElementKind::PartSashContainer && self.rng.random_bool(0.5) {
            e.orientation = Some(Orientation::Horizontal);
        }
        Some(e)
    }

    fn command_ref(&mut self) -> ElementId {
        if !self.commands.is_empty() && self.rng.random_bool(0.85) {
            self.commands[self.rng.random_range(0..self.commands.len())].clone()
        } else {
            id(&format!("missing.{}", self.rng.random_range(0..3)))
        }
    }

    fn allowed(kind: ElementKind) -> &'static [(ElementKind, &'static str)] {
        use ElementKind::*;
        match kind {
            Window => &[
                (Menu, "mainMenu"),
                (ToolBar, "toolbar"),
                (PerspectiveStack, "children"),
                (PartSashContainer, "children"),
                (PartStack, "children"),
                (Part, "children"),
                (Window, "windows"),
            ],
            PerspectiveStack => &[(Perspective, "children")],
            Perspective | PartSashContainer => &[
                (PartSashContainer, "children"),
                (PartStack, "children"),
                (Part, "children"),
            ],
            PartStack => &[(Part, "children")],
            Part => &[(Menu, "menus"), (ToolBar, "toolbar")],
            Menu => &[
                (Menu, "children"),
                (HandledMenuItem, "children"),
                (DirectMenuItem, "children"),
                (MenuItem, "children"),
                (MenuSeparator, "children"),
            ],
            ToolBar => &[(HandledToolItem, "children"), (DirectToolItem, "children")],
            _ => &[],
        }
    }

    fn opaque_leaf(&mut self) -> Node {
        let mut attributes = BTreeMap::new();
        attributes.insert(
            "key".to_string(),
            format!("k{}", self.rng.random_range(0..50)),
        );
        attributes.insert("value".to_string(), "v".to_string());
        Node::Opaque(OpaqueNode {
            tag: "persistedState".into(),
            attributes,
            text: None,
            children: Vec::new(),
        })
    }

    fn wrap(&mut self, child: ModelElement) -> Node {
        if self.opaque && self.rng.random_bool(0.1) {
            Node::Opaque(OpaqueNode {
                tag: "addons".into(),
                attributes: BTreeMap::new(),
                text: None,
                children: vec![Node::Element(child)],
            })
        } else {
            Node::Element(child)
        }
    }

    fn fill(&mut self, parent: &mut ModelElement, depth: usize) {
        let options = Self::allowed(parent.kind);
        if options.is_empty() || depth > 6 {
            return;
        }
        for _ in 0..self.rng.random_range(0..=4) {
            let (kind, feature) = options[self.rng.random_range(0..options.len())];
            let Some(mut child) = self.element(kind) else {
                return;
            };
            child.feature = feature.to_string();
            self.fill(&mut child, depth + 1);
            let node = self.wrap(child);
            parent.children.push(node);
            if self.opaque && self.rng.random_bool(0.05) {
                let leaf = self.opaque_leaf();
                parent.children.push(leaf);
            }
        }
    }

    pub fn root(&mut self) -> ModelElement {
        self.count = 1;
        let mut root = ModelElement::new(self.fresh_id("app"), ElementKind::Application);
        root.label = self.label();
        let mut commands = Vec::new();
        for _ in 0..self.rng.random_range(1..=12) {
            let Some(mut c) = self.element(ElementKind::Command) else {
                break;
            };
            if self.rng.random_bool(0.3) {
                if let Some(p) = self.element(ElementKind::CommandParameter) {
                    c.children.push(Node::Element(p));
                }
            }
            self.commands.push(c.id.clone());
            commands.push(c);
        }
        let mut windows = Vec::new();
        for _ in 0..self.rng.random_range(1..=2) {
            let Some(mut w) = self.element(ElementKind::Window) else {
                break;
            };
            self.fill(&mut w, 1);
            windows.push(w);
        }
        let mut tables = Vec::new();
        for _ in 0..self.rng.random_range(0..=2) {
            let Some(mut t) = self.element(ElementKind::BindingTable) else {
                break;
            };
            for _ in 0..self.rng.random_range(1..=4) {
                if let Some(k) = self.element(ElementKind::KeyBinding) {
                    t.children.push(Node::Element(k));
                }
            }
            tables.push(t);
        }
        let mut handlers = Vec::new();
        for _ in 0..self.rng.random_range(0..=commands.len()) {
            if let Some(h) = self.element(ElementKind::Handler) {
                handlers.push(h);
            }
        }
        for e in windows {
            root.children.push(Node::Element(e));
        }
        for e in commands.into_iter().chain(handlers).chain(tables) {
            root.children.push(Node::Element(e));
        }
        if self.opaque && self.rng.random_bool(0.5) {
            let leaf = self.opaque_leaf();
            root.children.push(leaf);
        }
        root
    }

    pub fn model(&mut self) -> ApplicationModel {
        let root = self.root();
        ApplicationModel::new(root, "").expect("generated model is well formed")
    }

    /// Fragments with fresh ids aimed at elements of `main`.
    pub fn fragments(&mut self, main: &ApplicationModel, n: usize) -> Vec<ModelFragment> {
        let targets: Vec<&ModelElement> = main
            .elements()
            .filter(|e| {
                matches!(
                    e.kind,
                    ElementKind::Application
                        | ElementKind::Window
                        | ElementKind::PartStack
                        | ElementKind::PartSashContainer
                        | ElementKind::Perspective
                        | ElementKind::Menu
                )
            })
            .collect();
        let mut out = Vec::new();
        for _ in 0..n {
            let t = targets[self.rng.random_range(0..targets.len())];
            let (feature, kind) = match t.kind {
                ElementKind::Application if self.rng.random_bool(0.5) => {
                    ("commands", ElementKind::Command)
                }
                ElementKind::Application => ("handlers", ElementKind::Handler),
                ElementKind::Menu => ("children", ElementKind::Menu),
                ElementKind::PartStack => ("children", ElementKind::Part),
                _ => ("children", ElementKind::PartStack),
            };
            let mut elements = Vec::new();
            self.cap = usize::MAX;
            for _ in 0..self.rng.random_range(1..=3) {
                let mut e = self.element(kind).expect("no cap for fragments");
                e.feature = feature.to_string();
                if kind == ElementKind::Command && self.rng.random_bool(0.5) {
                    let p = self.element(ElementKind::CommandParameter).unwrap();
                    e.children.push(Node::Element(p));
                }
                self.fill(&mut e, 3);
                elements.push(e);
            }
            let siblings: Vec<ElementId> =
                t.element_children().iter().map(|c| c.id.clone()).collect();
            let position = match self.rng.random_range(0..4) {
                0 => Position::First,
                1 if !siblings.is_empty() => {
                    Position::Before(siblings[self.rng.random_range(0..siblings.len())].clone())
                }
                2 if !siblings.is_empty() => {
                    Position::After(siblings[self.rng.random_range(0..siblings.len())].clone())
                }
                _ => Position::Last,
            };
            out.push(ModelFragment::new(t.id.clone(), feature, elements).at(position));
        }
        out
    }
}

/// Counts recognized elements in a node forest, looking inside opaque nodes.
pub fn count_elements(nodes: &[Node]) -> usize {
    nodes
        .iter()
        .map(|n| match n {
            Node::Element(e) => 1 + count_elements(&e.children),
            Node::Opaque(o) => count_elements(&o.children),
        })
        .sum()
}

/// A perspective holding a random sash tree of the given maximum depth.
/// Weights are sometimes missing; every container has at least one child.
pub fn sash_perspective(rng: &mut ChaCha8Rng, max_depth: usize) -> ModelElement {
    fn node(
        rng: &mut ChaCha8Rng,
        depth: usize,
        max_depth: usize,
        next: &mut usize,
    ) -> ModelElement {
        *next += 1;
        let n = *next;
        let mut e = if depth < max_depth && rng.random_bool(0.55) {
            let mut sash =
                ModelElement::new(id(&format!("sash{n}")), ElementKind::PartSashContainer);
            if rng.random_bool(0.5) {
                sash.orientation = Some(Orientation::Horizontal);
            }
            for _ in 0..rng.random_range(1..=3) {
                let c = node(rng, depth + 1, max_depth, next);
                sash.children.push(Node::Element(c));
            }
            sash
        } else if rng.random_bool(0.3) {
            let mut stack = ModelElement::new(id(&format!("stack{n}")), ElementKind::PartStack);
            for k in 0..rng.random_range(1..=3) {
                stack.children.push(Node::Element(
                    ModelElement::new(id(&format!("stack{n}.part{k}")), ElementKind::Part)
                        .with_label(format!("Tab {k}")),
                ));
            }
            stack
        } else {
            ModelElement::new(id(&format!("part{n}")), ElementKind::Part)
                .with_label(format!("Part {n}"))
        };
        if rng.random_bool(0.8) {
            e.container_data = Some(rng.random_range(1..=5u32).to_string());
        }
        e
    }
    let mut next = 0;
    let mut p = ModelElement::new(id("persp"), ElementKind::Perspective).with_label("Random");
    for _ in 0..rng.random_range(1..=3) {
        let c = node(rng, 1, max_depth, &mut next);
        p.children.push(Node::Element(c));
    }
    p
}

pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Inverse of the LaTeX escaping; any special character that is not
/// properly escaped is an error.
pub fn latex_unescape(text: &str) -> Result<String, String> {
    let mut out = String::new();
    let mut rest = text;
    while let Some(c) = rest.chars().next() {
        if c == '\\' {
            let tail = &rest[1..];
            let (decoded, used) =
                if let Some(n) = tail.chars().next().filter(|n| "&%$#_{}".contains(*n)) {
                    (n, 1)
                } else if tail.starts_with("~{}") {
                    ('~', 3)
                } else if tail.starts_with("^{}") {
                    ('^', 3)
                } else if tail.starts_with("textbackslash{}") {
                    ('\\', 15)
                } else {
                    return Err(format!(
                        "unknown control sequence at `{}`",
                        &rest[..rest.len().min(20)]
                    ));
                };
            out.push(decoded);
            rest = &tail[used..];
            continue;
        }
        if "&%$#_{}~^".contains(c) {
            return Err(format!(
                "unescaped `{c}` at `{}`",
                &rest[..rest.len().min(20)]
            ));
        }
        out.push(c);
        rest = &rest[c.len_utf8()..];
    }
    Ok(out)
}

/// Inverse of the HTML escaping; raw markup characters are an error.
pub fn html_unescape(text: &str) -> Result<String, String> {
    if let Some(c) = text.chars().find(|c| matches!(c, '<' | '>' | '"' | '\'')) {
        return Err(format!("unescaped `{c}`"));
    }
    quick_xml::escape::unescape(text)
        .map(|s| s.into_owned())
        .map_err(|e| e.to_string())
}

/// A LaTeX compiler on PATH, if any.
pub fn latex_compiler() -> Option<&'static str> {
    ["pdflatex", "xelatex", "lualatex", "tectonic"]
        .into_iter()
        .find(|c| {
            std::process::Command::new(c)
                .arg("--version")
                .output()
                .is_ok_and(|o| o.status.success())
        })
}

/// All files under `dir`, relative path to bytes.
pub fn read_tree(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    walkdir::WalkDir::new(dir)
        .into_iter()
        .filter_map(Result::ok)
        .filter(|e| e.file_type().is_file())
        .map(|e| {
            let rel = e
                .path()
                .strip_prefix(dir)
                .unwrap()
                .to_string_lossy()
                .into_owned();
            (rel, std::fs::read(e.path()).unwrap())
        })
        .collect()
}
