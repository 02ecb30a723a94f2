//! Structural comparison of a recorded and a replayed document.

use std::collections::BTreeSet;

use litforage_core::GraphDocument;

#[derive(Debug, Default, Clone, PartialEq, Eq)]
pub struct DocDiff {
    pub only_recorded_nodes: Vec<String>,
    pub only_replayed_nodes: Vec<String>,
    pub edge_mismatches: Vec<String>,
    pub pin_mismatches: Vec<String>,
    /// Other top-level parts that differ (positions, clusters, ...).
    pub other: Vec<&'static str>,
}

impl DocDiff {
    pub fn is_empty(&self) -> bool {
        *self == DocDiff::default()
    }

    pub fn report(&self) -> String {
        if self.is_empty() {
            return "EQUAL\n".into();
        }
        let mut out = String::from("DIFFERENT\n");
        let mut section = |name: &str, items: &[String]| {
            for item in items {
                out.push_str(&format!("  {name}: {item}\n"));
            }
        };
        section("node only in recorded document", &self.only_recorded_nodes);
        section("node only in replayed document", &self.only_replayed_nodes);
        section("edge", &self.edge_mismatches);
        section("pin", &self.pin_mismatches);
        for part in &self.other {
            out.push_str(&format!("  differs: {part}\n"));
        }
        out
    }
}

pub fn diff(recorded: &GraphDocument, replayed: &GraphDocument) -> DocDiff {
    let mut d = DocDiff::default();
    let ids = |doc: &GraphDocument| doc.nodes.iter().map(|n| n.id.to_string()).collect::<BTreeSet<_>>();
    let (a, b) = (ids(recorded), ids(replayed));
    d.only_recorded_nodes = a.difference(&b).cloned().collect();
    d.only_replayed_nodes = b.difference(&a).cloned().collect();

    let edges = |doc: &GraphDocument| {
        doc.edges
            .iter()
            .map(|e| format!("{} -{:?}-> {} w={}", e.source, e.kind, e.target, e.weight))
            .collect::<BTreeSet<_>>()
    };
    let (ea, eb) = (edges(recorded), edges(replayed));
    d.edge_mismatches = ea
        .symmetric_difference(&eb)
        .map(|e| format!("{e} ({})", if ea.contains(e) { "recorded only" } else { "replayed only" }))
        .collect();

    let pins = |doc: &GraphDocument| {
        doc.layout.pins.iter().map(|(k, v)| format!("{k} at {v:?}")).collect::<BTreeSet<_>>()
    };
    let (pa, pb) = (pins(recorded), pins(replayed));
    d.pin_mismatches = pa
        .symmetric_difference(&pb)
        .map(|p| format!("{p} ({})", if pa.contains(p) { "recorded only" } else { "replayed only" }))
        .collect();

    if d.only_recorded_nodes.is_empty() && d.only_replayed_nodes.is_empty() && recorded.nodes != replayed.nodes {
        d.other.push("node attributes");
    }
    if recorded.layout.positions != replayed.layout.positions {
        d.other.push("positions");
    }
    if recorded.layout.velocities != replayed.layout.velocities || recorded.layout.alpha != replayed.layout.alpha {
        d.other.push("simulation state");
    }
    if recorded.clusters != replayed.clusters {
        d.other.push("clusters");
    }
    if recorded.annotations != replayed.annotations {
        d.other.push("annotations");
    }
    if (&recorded.topic, recorded.created_at, recorded.updated_at, recorded.schema_version)
        != (&replayed.topic, replayed.created_at, replayed.updated_at, replayed.schema_version)
    {
        d.other.push("document metadata");
    }
    if recorded != replayed && d.is_empty() {
        d.other.push("document");
    }
    d
}
