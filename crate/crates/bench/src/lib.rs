//! Graph generators shared by the benchmarks.

use litforage_core::{EdgeKind, GraphDocument, PaperNode, Provenance, TypedEdge};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const WORDS: [&str; 16] = [
    "graph", "layout", "force", "citation", "cluster", "virtual", "reality", "immersive",
    "literature", "search", "embedding", "semantic", "network", "visual", "analytics", "review",
];

/// `n` papers with `n * degree / 2` random thematic edges and a seeded layout.
pub fn random_document(n: usize, degree: usize, seed: u64) -> GraphDocument {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut doc = GraphDocument::default();
    for i in 0..n {
        let title: Vec<&str> = WORDS.choose_multiple(&mut rng, 4).copied().collect();
        let mut node = PaperNode::new(format!("p{i:05}"), title.join(" "));
        node.abstract_text = Some(WORDS.choose_multiple(&mut rng, 8).copied().collect::<Vec<_>>().join(" "));
        doc.add_node(node).unwrap();
    }
    for _ in 0..n * degree / 2 {
        let (a, b) = (rng.gen_range(0..n), rng.gen_range(0..n));
        if a != b {
            let edge = TypedEdge::new(
                doc.nodes[a].id.clone(),
                doc.nodes[b].id.clone(),
                EdgeKind::Thematic,
                0.5,
                Provenance::ProviderRecommendation,
            );
            doc.add_edge(edge).unwrap();
        }
    }
    doc.init_layout(seed);
    doc
}
