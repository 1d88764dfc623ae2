//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line for
//! each and exits non-zero if any of them fails.

mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use ecrit::analyzer::{check_eligibility, Thresholds};
use ecrit::annotations::{extract_inline_annotations, AnnotationSet, SemanticAnnotation};
use ecrit::appmodel::{ApplicationModel, ElementId, ElementKind, ModelElement, Node, Orientation};
use ecrit::depiction::{layout_perspective, DepictionConfig, DepictionError, LayoutRect};
use ecrit::docmodel::{build_document_model, compute_initiators, compute_path, ProductInfo};
use ecrit::e4xmi;
use ecrit::merge::{merge, ModelFragment};
use ecrit::outputters::{generate_manual, GenerateOptions};
use ecrit::pipeline;
use rand::Rng;

use common::*;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

const BIN: &str = env!("CARGO_BIN_EXE_ecrit");
const PINNED: &str = "2024-05-01T12:00:00Z";

/// The ten manual components, in their required order.
const COMPONENTS: [&str; 10] = [
    "identification data",
    "table of contents",
    "introduction",
    "information for use of the documentation",
    "concept of operations",
    "procedures",
    "information on software commands",
    "error messages and problem resolution",
    "glossary",
    "navigational features",
];

fn ecrit(args: &[&str]) -> std::process::Output {
    Command::new(BIN)
        .args(args)
        .env(pipeline::TIMESTAMP_ENV, PINNED)
        .output()
        .expect("run ecrit")
}

fn html_headings(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut rest = text;
    while let Some(start) = rest.find("<h2") {
        rest = &rest[start..];
        let open = rest.find('>').unwrap() + 1;
        let close = rest.find("</h2>").unwrap();
        out.push(rest[open..close].trim().to_lowercase());
        rest = &rest[close..];
    }
    out
}

fn latex_headings(text: &str) -> Vec<String> {
    text.lines()
        .filter_map(|l| {
            l.strip_prefix("\\section*{")
                .or_else(|| l.strip_prefix("\\section{"))
        })
        .map(|l| l[..l.find('}').unwrap()].trim().to_lowercase())
        .collect()
}

fn generate_in_process(input: &Path, target: &str) -> Result<(String, Duration), String> {
    let started = Instant::now();
    let product = pipeline::load_product(input).map_err(|e| e.to_string())?;
    let out = pipeline::generate(
        &product,
        &Default::default(),
        target,
        &GenerateOptions::default(),
        PINNED,
    )
    .map_err(|e| e.to_string())?;
    let elapsed = started.elapsed();
    let text =
        String::from_utf8(out.output.artifacts[0].content.clone()).map_err(|e| e.to_string())?;
    Ok((text, elapsed))
}

fn iso_structure() -> Outcome {
    let inputs = [
        fixture("pharmacy.e4xmi"),
        fixture("minimal.e4xmi"),
        fixture("inline-annotated.e4xmi"),
        fixture("product/product.json"),
    ];
    let mut slowest = Duration::ZERO;
    let mut manuals = 0;
    for input in &inputs {
        for target in ["html", "latex"] {
            let (text, elapsed) = generate_in_process(input, target)?;
            let found = if target == "html" {
                html_headings(&text)
            } else {
                latex_headings(&text)
            };
            ensure!(
                found == COMPONENTS,
                "{} ({target}): headings {found:?}",
                input.display()
            );
            if input.ends_with("pharmacy.e4xmi") {
                slowest = slowest.max(elapsed);
            }
            manuals += 1;
        }
    }
    ensure!(
        slowest < Duration::from_secs(1),
        "pharmacy generation took {slowest:?}"
    );
    Ok(format!(
        "{manuals} manuals with the ten components in order; pharmacy in {slowest:?}"
    ))
}

const NS: &str = r#"xmi:version="2.0" xmlns:xmi="http://www.omg.org/XMI" xmlns:xsi="http://www.w3.org/2001/XMLSchema-instance" xmlns:application="http://www.eclipse.org/ui/2010/UIModel/application" xmlns:basic="http://www.eclipse.org/ui/2010/UIModel/application/ui/basic" xmlns:commands="http://www.eclipse.org/ui/2010/UIModel/application/commands" xmlns:fragment="http://www.eclipse.org/ui/2010/UIModel/fragment""#;

fn synthetic_xml(commands: usize, parts: usize, full: bool) -> String {
    let cmds: String = (0..commands)
        .map(|i| format!(r#"<{tag} xsi:type="commands:Command" elementId="sweep.cmd{i}" commandName="C{i}"/>"#, tag = if full { "commands" } else { "elements" }))
        .collect();
    let parts_xml: String = (0..parts)
        .map(|i| {
            format!(
                r#"<{tag} xsi:type="basic:Part" elementId="sweep.part{i}" label="P{i}"/>"#,
                tag = if full { "children" } else { "elements" }
            )
        })
        .collect();
    if full {
        format!(
            r#"<?xml version="1.0" encoding="UTF-8"?><application:Application {NS} elementId="sweep.app"><children xsi:type="basic:Window" elementId="sweep.w">{parts_xml}</children>{cmds}</application:Application>"#
        )
    } else {
        format!(
            r#"<?xml version="1.0" encoding="UTF-8"?><fragment:ModelFragments {NS}><fragments xsi:type="fragment:StringModelFragment" featurename="commands" parentElementId="x.app">{cmds}</fragments><fragments xsi:type="fragment:StringModelFragment" featurename="children" parentElementId="x.stack">{parts_xml}</fragments></fragment:ModelFragments>"#
        )
    }
}

fn eligibility_sweep() -> Outcome {
    let mut cases = 0;
    let mut eligible = 0;
    for commands in 15..=25 {
        for parts in 3..=7 {
            for full in [true, false] {
                let xml = synthetic_xml(commands, parts, full);
                let (model, _) = e4xmi::parse_model(xml.as_bytes()).map_err(|e| e.to_string())?;
                let report = check_eligibility(&model, Thresholds::default());
                let expected = commands >= 20 && parts >= 5 && full;
                ensure!(
                    report.command_count == commands && report.part_count == parts,
                    "counted {}/{} for {commands}/{parts}",
                    report.command_count,
                    report.part_count
                );
                ensure!(
                    report.has_full_model == full && report.eligible == expected,
                    "commands={commands} parts={parts} full={full}: eligible={}",
                    report.eligible
                );
                cases += 1;
                eligible += usize::from(expected);
            }
        }
    }
    Ok(format!(
        "{cases} cases, {eligible} eligible, all as expected"
    ))
}

/// Linear-scan reference: every triggering element pointing at `command`,
/// with its full ancestor chain.
fn initiator_oracle(
    root: &ModelElement,
    command: &ElementId,
) -> BTreeMap<ElementId, Vec<ElementId>> {
    fn walk(
        nodes: &[Node],
        chain: &mut Vec<(ElementId, ElementKind)>,
        command: &ElementId,
        out: &mut BTreeMap<ElementId, Vec<ElementId>>,
    ) {
        for n in nodes {
            match n {
                Node::Opaque(o) => walk(&o.children, chain, command, out),
                Node::Element(e) => {
                    chain.push((e.id.clone(), e.kind));
                    let triggers = matches!(
                        e.kind,
                        ElementKind::HandledMenuItem
                            | ElementKind::HandledToolItem
                            | ElementKind::KeyBinding
                    );
                    if triggers && e.command_ref.as_ref() == Some(command) {
                        let start = chain
                            .iter()
                            .position(|(_, k)| *k == ElementKind::Window)
                            .unwrap_or(0);
                        out.insert(
                            e.id.clone(),
                            chain[start..].iter().map(|(i, _)| i.clone()).collect(),
                        );
                    }
                    walk(&e.children, chain, command, out);
                    chain.pop();
                }
            }
        }
    }
    let mut out = BTreeMap::new();
    let mut chain = vec![(root.id.clone(), root.kind)];
    walk(&root.children, &mut chain, command, &mut out);
    out
}

fn initiator_equivalence() -> Outcome {
    let mut commands = 0;
    let mut initiators = 0;
    for seed in 0..100u64 {
        let cap = 10 + (seed as usize * 37) % 191;
        let mut g = ModelGen::new(seed, cap);
        g.opaque = true;
        let model = g.model();
        ensure!(model.len() <= 200, "seed {seed}: {} elements", model.len());
        for c in model.elements_of_kind(ElementKind::Command) {
            let expected = initiator_oracle(model.root(), &c.id);
            let got = compute_initiators(&model, &c.id).map_err(|e| e.to_string())?;
            let got_ids: BTreeSet<&ElementId> = got.iter().map(|i| &i.id).collect();
            let want_ids: BTreeSet<&ElementId> = expected.keys().collect();
            ensure!(
                got_ids == want_ids && got.len() == expected.len(),
                "seed {seed}, command {}: got {got_ids:?}, expected {want_ids:?}",
                c.id
            );
            for i in &got {
                let segs: Vec<&ElementId> = i.path.segments.iter().map(|s| &s.id).collect();
                let want: Vec<&ElementId> = expected[&i.id].iter().collect();
                ensure!(
                    segs == want,
                    "seed {seed}, initiator {}: path {segs:?} vs {want:?}",
                    i.id
                );
            }
            commands += 1;
            initiators += got.len();
        }
    }
    Ok(format!(
        "100 models, {commands} commands, {initiators} initiators matched"
    ))
}

fn parse_file(path: &Path) -> Result<ApplicationModel, String> {
    let bytes = std::fs::read(path).map_err(|e| e.to_string())?;
    e4xmi::parse_model(&bytes)
        .map(|(m, _)| m)
        .map_err(|e| format!("{}: {e}", path.display()))
}

fn parse_fragments(path: &Path) -> Result<Vec<ModelFragment>, String> {
    let bytes = std::fs::read(path).map_err(|e| e.to_string())?;
    e4xmi::parse_fragment(&bytes)
        .map(|(f, _)| f)
        .map_err(|e| format!("{}: {e}", path.display()))
}

fn expected_size(main: &ApplicationModel, fragments: &[ModelFragment]) -> usize {
    main.len()
        + fragments
            .iter()
            .map(|f| count_elements(&f.elements))
            .sum::<usize>()
}

fn merge_identity_and_conservation() -> Outcome {
    let corpus = corpus();
    for path in &corpus {
        let m = parse_file(path)?;
        let (merged, report) = merge(&m, &[]).map_err(|e| e.to_string())?;
        ensure!(
            merged == m,
            "{}: merge with no fragments changed the model",
            path.display()
        );
        ensure!(
            report.applied.is_empty(),
            "{}: fragments reported as applied",
            path.display()
        );
    }

    let products: [(&str, &[&str]); 4] = [
        (
            "product/shop-main.e4xmi",
            &["product/shop-reports.e4xmi", "product/shop-extras.e4xmi"],
        ),
        ("dangling/main.e4xmi", &["dangling/broken.e4xmi"]),
        ("pharmacy.e4xmi", &["fragment-only.e4xmi"]),
        (
            "duplicate/main.e4xmi",
            &["duplicate/first.e4xmi", "duplicate/second.e4xmi"],
        ),
    ];
    let mut successful = 0;
    let mut rejected = 0;
    for (main, files) in products {
        let m = parse_file(&fixture(main))?;
        let mut fragments = Vec::new();
        for f in files {
            fragments.extend(parse_fragments(&fixture(f))?);
        }
        match merge(&m, &fragments) {
            Ok((merged, _)) => {
                let want = expected_size(&m, &fragments);
                ensure!(
                    merged.len() == want,
                    "{main}: {} indexed, expected {want}",
                    merged.len()
                );
                successful += 1;
            }
            Err(_) => rejected += 1,
        }
    }
    ensure!(
        rejected == 1,
        "expected only the duplicate-id product to be rejected, {rejected} were"
    );

    for seed in 0..100u64 {
        let mut g = ModelGen::new(seed, 120);
        let m = g.model();
        let n = g.rng().random_range(1..=5);
        let fragments = g.fragments(&m, n);
        let (merged, _) = merge(&m, &fragments).map_err(|e| format!("seed {seed}: {e}"))?;
        let want = expected_size(&m, &fragments);
        ensure!(
            merged.len() == want,
            "seed {seed}: {} indexed, expected {want}",
            merged.len()
        );
        let (again, _) = merge(&m, &[]).map_err(|e| e.to_string())?;
        ensure!(again == m, "seed {seed}: identity failed");
        successful += 1;
    }
    Ok(format!(
        "identity on {} corpus models; conservation on {successful} merges",
        corpus.len()
    ))
}

fn round_trip() -> Outcome {
    let mut models = 0;
    let mut fragment_files = 0;
    for path in corpus() {
        let first = parse_file(&path)?;
        if !first.is_fragment_only {
            let (second, _) = e4xmi::parse_model(e4xmi::serialize_model(&first).as_bytes())
                .map_err(|e| format!("{}: reparse failed: {e}", path.display()))?;
            ensure!(
                first == second,
                "{}: model differs after round trip",
                path.display()
            );
            models += 1;
        } else {
            let frags = parse_fragments(&path)?;
            let (again, _) =
                e4xmi::parse_fragment(e4xmi::serialize_fragments(&frags).as_bytes())
                    .map_err(|e| format!("{}: fragment reparse failed: {e}", path.display()))?;
            ensure!(
                frags == again,
                "{}: fragments differ after round trip",
                path.display()
            );
            fragment_files += 1;
        }
    }
    for seed in 0..100u64 {
        let mut g = ModelGen::new(seed, 200);
        g.opaque = true;
        let text = e4xmi::serialize_model(&g.model());
        let (first, _) =
            e4xmi::parse_model(text.as_bytes()).map_err(|e| format!("seed {seed}: {e}"))?;
        let (second, _) = e4xmi::parse_model(e4xmi::serialize_model(&first).as_bytes())
            .map_err(|e| format!("seed {seed}: {e}"))?;
        ensure!(
            first == second,
            "seed {seed}: random model differs after round trip"
        );
    }
    Ok(format!(
        "{models} model files, {fragment_files} fragment files and 100 random models stable"
    ))
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct BoxI {
    x0: i64,
    y0: i64,
    x1: i64,
    y1: i64,
}

fn bbox(e: &ModelElement, rects: &BTreeMap<ElementId, LayoutRect>) -> Result<BoxI, String> {
    if matches!(e.kind, ElementKind::Part | ElementKind::PartStack) {
        let r = rects
            .get(&e.id)
            .ok_or_else(|| format!("no rect for leaf {}", e.id))?;
        return Ok(BoxI {
            x0: r.x.into(),
            y0: r.y.into(),
            x1: i64::from(r.x) + i64::from(r.width),
            y1: i64::from(r.y) + i64::from(r.height),
        });
    }
    let boxes = e
        .element_children()
        .into_iter()
        .map(|c| bbox(c, rects))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(BoxI {
        x0: boxes.iter().map(|b| b.x0).min().unwrap(),
        y0: boxes.iter().map(|b| b.y0).min().unwrap(),
        x1: boxes.iter().map(|b| b.x1).max().unwrap(),
        y1: boxes.iter().map(|b| b.y1).max().unwrap(),
    })
}

type Edge = fn(&BoxI) -> i64;

/// Children of a container tile its box along the split axis.
fn check_split(
    children: &[&ModelElement],
    orientation: Orientation,
    parent: BoxI,
    rects: &BTreeMap<ElementId, LayoutRect>,
) -> Result<(), String> {
    let boxes = children
        .iter()
        .map(|c| bbox(c, rects))
        .collect::<Result<Vec<_>, _>>()?;
    let (start, end, along): (Edge, Edge, bool) = match orientation {
        Orientation::Horizontal => (|b| b.x0, |b| b.x1, true),
        Orientation::Vertical => (|b| b.y0, |b| b.y1, false),
    };
    let mut cursor = start(&parent);
    let mut sum = 0;
    for (c, b) in children.iter().zip(&boxes) {
        ensure!(
            start(b) == cursor,
            "{} starts at {} instead of {cursor}",
            c.id,
            start(b)
        );
        cursor = end(b);
        sum += end(b) - start(b);
        let cross_ok = if along {
            b.y0 == parent.y0 && b.y1 == parent.y1
        } else {
            b.x0 == parent.x0 && b.x1 == parent.x1
        };
        ensure!(
            cross_ok,
            "{} does not span its parent across the split",
            c.id
        );
    }
    let length = end(&parent) - start(&parent);
    ensure!(
        (sum - length).abs() <= 1,
        "sibling lengths sum to {sum}, parent is {length}"
    );
    for (c, b) in children.iter().zip(boxes) {
        if c.kind == ElementKind::PartSashContainer {
            let inner = c.element_children();
            check_split(
                &inner,
                c.orientation.unwrap_or(Orientation::Vertical),
                b,
                rects,
            )?;
        }
    }
    Ok(())
}

fn depiction_geometry() -> Outcome {
    let mut laid_out = 0;
    let mut degenerate = 0;
    let mut leaves = 0;
    let mut seed = 0u64;
    while laid_out < 200 {
        ensure!(
            seed < 2000,
            "only {laid_out} of {seed} trees could be laid out"
        );
        let mut rng = seeded(seed);
        seed += 1;
        let w = rng.random_range(200..=1600u32);
        let h = rng.random_range(150..=1200u32);
        let depth = rng.random_range(1..=4);
        let persp = sash_perspective(&mut rng, depth);
        let config = DepictionConfig {
            canvas_width: w,
            canvas_height: h,
            margin: 0,
            min_rect: 1,
            ..DepictionConfig::default()
        };
        let layout = match layout_perspective(&persp, &config) {
            Ok(l) => l,
            Err(DepictionError::DegenerateArea {
                width, height, min, ..
            }) => {
                ensure!(
                    width < min || height < min,
                    "seed {seed}: spurious degenerate-area error"
                );
                degenerate += 1;
                continue;
            }
            Err(e) => return Err(e.to_string()),
        };
        let rects: BTreeMap<ElementId, LayoutRect> = layout
            .rects
            .iter()
            .map(|r| (r.element_id.clone(), r.clone()))
            .collect();
        ensure!(
            rects.len() == layout.rects.len(),
            "seed {seed}: a leaf was drawn twice"
        );
        let mut area = 0u64;
        for (i, a) in layout.rects.iter().enumerate() {
            ensure!(
                a.x + a.width <= w && a.y + a.height <= h,
                "seed {seed}: {} leaves the canvas",
                a.element_id
            );
            area += u64::from(a.width) * u64::from(a.height);
            for b in &layout.rects[i + 1..] {
                let disjoint = a.x + a.width <= b.x
                    || b.x + b.width <= a.x
                    || a.y + a.height <= b.y
                    || b.y + b.height <= a.y;
                ensure!(
                    disjoint,
                    "seed {seed}: {} overlaps {}",
                    a.element_id,
                    b.element_id
                );
            }
        }
        ensure!(
            area == u64::from(w) * u64::from(h),
            "seed {seed}: leaf area {area} != canvas area"
        );
        let canvas = BoxI {
            x0: 0,
            y0: 0,
            x1: w.into(),
            y1: h.into(),
        };
        check_split(
            &persp.element_children(),
            Orientation::Vertical,
            canvas,
            &rects,
        )
        .map_err(|e| format!("seed {seed}: {e}"))?;
        laid_out += 1;
        leaves += layout.rects.len();
    }
    Ok(format!(
        "{laid_out} trees ({leaves} leaves) tile their canvas; {degenerate} sub-pixel trees refused"
    ))
}

fn section_items(section: &str) -> Result<Vec<String>, String> {
    let Some(start) = section.find("<ul class=\"initiators\">") else {
        return Ok(Vec::new());
    };
    let list = &section[start..section[start..].find("</ul>").map(|e| start + e).unwrap()];
    list.lines()
        .filter_map(|l| l.strip_prefix("<li>"))
        .map(|l| html_unescape(&l[..l.find(" <span class=\"trigger\">").unwrap_or(l.len())]))
        .collect()
}

fn command_sections() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let out = dir.path().join("html");
    let model_path = fixture("pharmacy.e4xmi");
    let run = ecrit(&[
        "generate",
        model_path.to_str().unwrap(),
        "-o",
        out.to_str().unwrap(),
    ]);
    ensure!(
        run.status.success(),
        "generate failed: {}",
        String::from_utf8_lossy(&run.stderr)
    );
    let html = std::fs::read_to_string(out.join("manual.html")).map_err(|e| e.to_string())?;
    let sections: Vec<&str> = html.split("<section class=\"command\"").skip(1).collect();

    let model = parse_file(&model_path)?;
    let commands = model.elements_of_kind(ElementKind::Command);
    ensure!(
        sections.len() == 20 && commands.len() == 20,
        "{} command sections for {} commands",
        sections.len(),
        commands.len()
    );
    let by_label: BTreeMap<String, &ModelElement> = commands
        .iter()
        .map(|c| (c.display_label().to_string(), *c))
        .collect();
    let mut listed = 0;
    for s in &sections {
        let label = html_unescape(&s[s.find("<h3>").unwrap() + 4..s.find("</h3>").unwrap()])?;
        let c = by_label
            .get(&label)
            .ok_or_else(|| format!("section for unknown command {label}"))?;
        let mut want: Vec<String> = model
            .elements()
            .filter(|e| e.command_ref.as_ref() == Some(&c.id))
            .filter(|e| {
                matches!(
                    e.kind,
                    ElementKind::HandledMenuItem
                        | ElementKind::HandledToolItem
                        | ElementKind::KeyBinding
                )
            })
            .map(|e| compute_path(&model, &e.id).unwrap().rendered)
            .collect();
        let mut got = section_items(s)?;
        want.sort();
        got.sort();
        ensure!(got == want, "{}: listed {got:?}, expected {want:?}", c.id);
        ensure!(
            !want.is_empty() || s.contains("class=\"note\""),
            "{} has no initiators and no note saying so",
            c.id
        );
        listed += got.len();
    }

    // Strict mode: remove one description at a time.
    let sidecar_text =
        std::fs::read_to_string(fixture("pharmacy.ecrit.json")).map_err(|e| e.to_string())?;
    let sidecar: serde_json::Value =
        serde_json::from_str(&sidecar_text).map_err(|e| e.to_string())?;
    let (inline, _) = extract_inline_annotations(&model);
    let work = dir.path().join("strict");
    std::fs::create_dir_all(&work).map_err(|e| e.to_string())?;
    let model_copy = work.join("pharmacy.e4xmi");
    std::fs::copy(&model_path, &model_copy).map_err(|e| e.to_string())?;
    let sidecar_copy = work.join("pharmacy.ecrit.json");
    let strict = |out: &Path| {
        ecrit(&[
            "generate",
            model_copy.to_str().unwrap(),
            "--strict",
            "-o",
            out.to_str().unwrap(),
        ])
    };

    std::fs::write(&sidecar_copy, &sidecar_text).map_err(|e| e.to_string())?;
    let baseline = strict(&work.join("out"));
    ensure!(
        baseline.status.code() == Some(0),
        "complete model fails strict mode"
    );

    let ids: Vec<String> = sidecar["elements"]
        .as_object()
        .unwrap()
        .keys()
        .cloned()
        .collect();
    let mut checked = 0;
    for removed in &ids {
        if inline
            .get(&ElementId::new(removed.as_str()).unwrap())
            .is_some()
        {
            continue;
        }
        let mut reduced = sidecar.clone();
        reduced["elements"].as_object_mut().unwrap().remove(removed);
        std::fs::write(
            &sidecar_copy,
            serde_json::to_string_pretty(&reduced).unwrap(),
        )
        .map_err(|e| e.to_string())?;
        let run = strict(&work.join(format!("out-{checked}")));
        let stderr = String::from_utf8_lossy(&run.stderr);
        ensure!(
            run.status.code() == Some(2),
            "without {removed}: exit {:?}",
            run.status.code()
        );
        ensure!(
            stderr.contains(removed.as_str()),
            "without {removed}: error does not name it: {stderr}"
        );
        checked += 1;
    }
    Ok(format!(
        "20 command sections, {listed} initiator paths listed; strict mode exits 2 naming the id for each of {checked} removals"
    ))
}

fn adversarial_strings() -> Vec<String> {
    let mut v: Vec<String> = [
        "<script>alert('x')</script>",
        "a & b && c",
        "50% off",
        "$x$ and $$y$$",
        "#1 ~ ^ _",
        "{braces}",
        "\\textbf{bold}",
        "\\\\ line break",
        "&amp; already escaped",
        "&lt;tag&gt;",
        "\"double\" and 'single'",
        "${item.label}",
        "$for(commands)x$end",
        "$if(present:manual)y$end",
        "$include(manual)",
        "C:\\Program Files\\App",
        "~user/^caret",
        "a_b_c",
        "}{",
        "\\",
        "<![CDATA[x]]>",
        "-- --> <!--",
        "\\end{document}",
        "100\\% done",
        "Größe über ▸ café",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    let alphabet: Vec<char> = "&<>\"'\\{}$%#_~^ ab\n".chars().collect();
    let mut rng = seeded(8);
    while v.len() < 50 {
        let len = rng.random_range(1..40);
        let mut s = String::from("x");
        for _ in 0..len {
            s.push(alphabet[rng.random_range(0..alphabet.len())]);
        }
        v.push(s);
    }
    v
}

fn between<'a>(text: &'a str, open: &str, close: &str) -> Result<&'a str, String> {
    let start = text
        .find(open)
        .ok_or_else(|| format!("`{open}` not found"))?
        + open.len();
    let end = text[start..]
        .find(close)
        .ok_or_else(|| format!("`{close}` not found after `{open}`"))?;
    Ok(&text[start..start + end])
}

fn escaping_safety() -> Outcome {
    let strings = adversarial_strings();
    let mut root =
        ModelElement::new(id("adv.app"), ElementKind::Application).with_label("Adversary");
    let mut ann = AnnotationSet::default();
    ann.meta.about = Some(strings[0].clone());
    for (i, s) in strings.iter().enumerate() {
        let cid = id(&format!("adv.cmd{i:02}"));
        root = root.with_child(
            ModelElement::new(cid.clone(), ElementKind::Command).with_label(format!("Adv{i:02}")),
        );
        let mut a = SemanticAnnotation::new(cid, s.clone());
        a.precondition = Some(s.clone());
        ann.insert(a);
    }
    let model = ApplicationModel::new(root, "").map_err(|e| e.to_string())?;
    let doc = build_document_model(
        &model,
        &ann,
        &ProductInfo {
            name: "Adv".into(),
            version: "1".into(),
        },
        PINNED,
    );
    let opts = GenerateOptions::default();
    let html = generate_manual(&doc, "html", &[], &opts).map_err(|e| e.to_string())?;
    let html = String::from_utf8(html.artifacts[0].content.clone()).unwrap();
    let tex_out = generate_manual(&doc, "latex", &[], &opts).map_err(|e| e.to_string())?;
    let tex = String::from_utf8(tex_out.artifacts[0].content.clone()).unwrap();

    for (i, s) in strings.iter().enumerate() {
        let section = between(&html, &format!("<h3>Adv{i:02}</h3>"), "</section>")?;
        let desc = html_unescape(between(section, "<p class=\"description\">", "</p>")?)
            .map_err(|e| format!("html #{i}: {e}"))?;
        let pre = html_unescape(between(section, "<strong>Precondition:</strong> ", "</p>")?)
            .map_err(|e| format!("html #{i}: {e}"))?;
        ensure!(
            desc == *s && pre == *s,
            "html #{i}: {s:?} came back as {desc:?} / {pre:?}"
        );

        let section = between(
            &tex,
            &format!("\\subsection{{Adv{i:02}}}"),
            "\\textbf{Available from:}",
        )?;
        let body = &section[section.find('\n').unwrap() + 1..];
        let desc = latex_unescape(between(body, "", "\n\n\\textbf{Precondition:} ")?)
            .map_err(|e| format!("latex #{i}: {e}"))?;
        let marker = "\\textbf{Precondition:} ";
        let pre_raw = &body[body.find(marker).ok_or("precondition missing")? + marker.len()..];
        let pre = latex_unescape(pre_raw.strip_suffix("\n\n").unwrap_or(pre_raw))
            .map_err(|e| format!("latex #{i}: {e}"))?;
        ensure!(
            desc == *s && pre == *s,
            "latex #{i}: {s:?} came back as {desc:?} / {pre:?}"
        );
    }

    let compile = match latex_compiler() {
        None => "LaTeX compile skipped: no LaTeX toolchain on PATH".to_string(),
        Some(compiler) => {
            let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
            for a in &tex_out.artifacts {
                std::fs::write(dir.path().join(&a.path), &a.content).map_err(|e| e.to_string())?;
            }
            let mut cmd = Command::new(compiler);
            if compiler != "tectonic" {
                cmd.args(["-interaction=nonstopmode", "-halt-on-error"]);
            }
            let run = cmd
                .arg("manual.tex")
                .current_dir(dir.path())
                .output()
                .map_err(|e| e.to_string())?;
            ensure!(
                run.status.success(),
                "{compiler} failed:\n{}",
                String::from_utf8_lossy(&run.stdout)
            );
            format!("compiled with {compiler}")
        }
    };
    Ok(format!(
        "{} strings survive HTML and LaTeX rendering; {compile}",
        strings.len()
    ))
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let runs = [
        ("pharmacy.e4xmi", "html"),
        ("pharmacy.e4xmi", "latex"),
        ("product/product.json", "html"),
        ("product/product.json", "latex"),
    ];
    let mut files = 0;
    for (k, (input, target)) in runs.iter().enumerate() {
        let mut trees = Vec::new();
        for attempt in 0..2 {
            let out = dir.path().join(format!("{k}-{attempt}"));
            let run = ecrit(&[
                "generate",
                fixture(input).to_str().unwrap(),
                "-t",
                target,
                "--dump-model",
                "-o",
                out.to_str().unwrap(),
            ]);
            ensure!(
                run.status.success(),
                "{input} ({target}): {}",
                String::from_utf8_lossy(&run.stderr)
            );
            trees.push(read_tree(&out));
        }
        ensure!(!trees[0].is_empty(), "{input}: empty output");
        ensure!(
            trees[0] == trees[1],
            "{input} ({target}): output trees differ"
        );
        ensure!(
            String::from_utf8_lossy(&trees[0]["document-model.json"]).contains(PINNED),
            "{input}: pinned timestamp not used"
        );
        files += trees[0].len();
    }
    Ok(format!("4 run pairs, {files} files byte-identical"))
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("manual structure", iso_structure),
        ("eligibility thresholds", eligibility_sweep),
        ("initiator oracle equivalence", initiator_equivalence),
        (
            "merge identity and conservation",
            merge_identity_and_conservation,
        ),
        ("round trip", round_trip),
        ("depiction geometry", depiction_geometry),
        ("command-section completeness", command_sections),
        ("escaping safety", escaping_safety),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (n, (name, check)) in criteria.iter().enumerate() {
        let outcome = std::panic::catch_unwind(check).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        match outcome {
            Ok(detail) => println!("PASS {}. {name}: {detail}", n + 1),
            Err(reason) => {
                failed += 1;
                println!("FAIL {}. {name}: {reason}", n + 1);
            }
        }
    }
    println!(
        "acceptance: {}/{} criteria met",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
