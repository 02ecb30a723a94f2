//! Deterministic SVG renderings of snapshots and event logs.

use std::collections::BTreeMap;
use std::fmt::Write;

use litforage_core::{Feature, GraphDocument, InteractionEvent, Modality};

pub const CLUSTER_PALETTE: [&str; 8] =
    ["#e6194b", "#3cb44b", "#4363d8", "#f58231", "#911eb4", "#42d4f4", "#f032e6", "#bfef45"];
pub const UNCLUSTERED: &str = "#9e9e9e";

const SIZE: f64 = 800.0;
const MARGIN: f64 = 40.0;

pub fn escape(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for c in text.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            _ => out.push(c),
        }
    }
    out
}

pub fn modality_color(m: Modality) -> &'static str {
    match m {
        Modality::Menu => "#1f77b4",
        Modality::PointerGesture => "#ff7f0e",
        Modality::Voice => "#2ca02c",
        Modality::Api => "#9467bd",
        Modality::System => "#7f7f7f",
    }
}

/// Top-down view: x to the right, z downward, the vertical y axis dropped.
pub fn birdseye_svg(doc: &GraphDocument) -> String {
    let mut svg = String::new();
    writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}">"#
    )
    .unwrap();
    writeln!(svg, r##"<rect width="{SIZE}" height="{SIZE}" fill="#101418"/>"##).unwrap();

    let points: Vec<[f64; 2]> = doc
        .nodes
        .iter()
        .filter_map(|n| doc.layout.positions.get(&n.id))
        .chain(doc.clusters.iter().map(|c| &c.anchor))
        .map(|p| [p[0], p[2]])
        .collect();
    if points.is_empty() {
        svg.push_str("</svg>\n");
        return svg;
    }
    let min_x = points.iter().map(|p| p[0]).fold(f64::INFINITY, f64::min);
    let max_x = points.iter().map(|p| p[0]).fold(f64::NEG_INFINITY, f64::max);
    let min_z = points.iter().map(|p| p[1]).fold(f64::INFINITY, f64::min);
    let max_z = points.iter().map(|p| p[1]).fold(f64::NEG_INFINITY, f64::max);
    let span = (max_x - min_x).max(max_z - min_z).max(1.0);
    let scale = (SIZE - 2.0 * MARGIN) / span;
    let project = |p: &[f64; 3]| (MARGIN + (p[0] - min_x) * scale, MARGIN + (p[2] - min_z) * scale);

    svg.push_str("<g class=\"edges\">\n");
    for e in &doc.edges {
        let (Some(a), Some(b)) = (doc.layout.positions.get(&e.source), doc.layout.positions.get(&e.target)) else {
            continue;
        };
        let ((x1, y1), (x2, y2)) = (project(a), project(b));
        writeln!(
            svg,
            r#"<line class="edge {}" x1="{x1:.2}" y1="{y1:.2}" x2="{x2:.2}" y2="{y2:.2}" stroke="{}" stroke-opacity="0.6"/>"#,
            e.kind.color(),
            e.kind.color()
        )
        .unwrap();
    }
    svg.push_str("</g>\n<g class=\"nodes\">\n");
    for n in &doc.nodes {
        let Some(p) = doc.layout.positions.get(&n.id) else { continue };
        let (x, y) = project(p);
        let fill = doc.cluster_of(&n.id).map_or(UNCLUSTERED, |c| CLUSTER_PALETTE[c.cluster_id as usize % 8]);
        let r = if n.is_seed { 7.0 } else { 4.5 };
        let stroke = if doc.layout.is_pinned(&n.id) { r##" stroke="#ffffff" stroke-width="1.5""## } else { "" };
        writeln!(
            svg,
            r#"<circle class="node" cx="{x:.2}" cy="{y:.2}" r="{r}" fill="{fill}"{stroke}><title>{}</title></circle>"#,
            escape(&n.title)
        )
        .unwrap();
    }
    svg.push_str("</g>\n<g class=\"labels\">\n");
    for c in &doc.clusters {
        let (x, y) = project(&c.anchor);
        writeln!(
            svg,
            r#"<text class="cluster-label" x="{x:.2}" y="{y:.2}" fill="{}" font-family="sans-serif" font-size="14" text-anchor="middle">{}</text>"#,
            CLUSTER_PALETTE[c.cluster_id as usize % 8],
            escape(&c.label)
        )
        .unwrap();
    }
    svg.push_str("</g>\n</svg>\n");
    svg
}

pub fn tally(events: &[InteractionEvent]) -> BTreeMap<Feature, usize> {
    let mut counts: BTreeMap<Feature, usize> = Feature::ALL.iter().map(|f| (*f, 0)).collect();
    for e in events {
        *counts.entry(e.feature).or_default() += 1;
    }
    counts
}

/// One strip per feature; each event is a tick mark colored by modality.
pub fn usage_svg(events: &[InteractionEvent]) -> String {
    const LABEL_W: f64 = 200.0;
    const PLOT_W: f64 = 660.0;
    const STRIP_H: f64 = 40.0;
    let width = LABEL_W + PLOT_W + 40.0;
    let height = STRIP_H * Feature::ALL.len() as f64 + 90.0;
    let counts = tally(events);
    let t0 = events.first().map_or(0, |e| e.ts);
    let t1 = events.last().map_or(0, |e| e.ts);
    let span = (t1 - t0).max(1) as f64;

    let mut svg = String::new();
    writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="13">"#
    )
    .unwrap();
    writeln!(svg, r##"<rect width="{width}" height="{height}" fill="#ffffff"/>"##).unwrap();
    for (row, feature) in Feature::ALL.iter().enumerate() {
        let top = 20.0 + row as f64 * STRIP_H;
        writeln!(
            svg,
            r#"<g class="strip" data-feature="{}" data-count="{}">"#,
            feature.name(),
            counts[feature]
        )
        .unwrap();
        writeln!(
            svg,
            r##"<rect x="{LABEL_W}" y="{top:.1}" width="{PLOT_W}" height="{:.1}" fill="#f2f2f2"/>"##,
            STRIP_H - 8.0
        )
        .unwrap();
        writeln!(svg, r#"<text x="10" y="{:.1}">{} ({})</text>"#, top + 21.0, feature.name(), counts[feature]).unwrap();
        for e in events.iter().filter(|e| e.feature == *feature) {
            let x = LABEL_W + (e.ts - t0) as f64 / span * (PLOT_W - 3.0);
            writeln!(
                svg,
                r#"<rect class="mark" data-modality="{}" x="{x:.2}" y="{:.1}" width="3" height="{:.1}" fill="{}"/>"#,
                e.modality.name(),
                top + 4.0,
                STRIP_H - 16.0,
                modality_color(e.modality)
            )
            .unwrap();
        }
        svg.push_str("</g>\n");
    }
    let legend_y = 20.0 + STRIP_H * Feature::ALL.len() as f64 + 25.0;
    svg.push_str("<g class=\"legend\">\n");
    for (i, m) in Modality::ALL.iter().enumerate() {
        let x = LABEL_W + i as f64 * 130.0;
        writeln!(svg, r#"<rect x="{x}" y="{:.1}" width="12" height="12" fill="{}"/>"#, legend_y - 11.0, modality_color(*m))
            .unwrap();
        writeln!(svg, r#"<text x="{}" y="{legend_y:.1}">{}</text>"#, x + 18.0, m.name()).unwrap();
    }
    svg.push_str("</g>\n</svg>\n");
    svg
}
