use litforage_core::layout::{self, vec3, ForceConfig, ManyBody};
use litforage_core::{EdgeKind, GraphDocument, PaperId, PaperNode, Provenance, TypedEdge};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_graph(n: usize, edges: usize, seed: u64, spread: f64) -> GraphDocument {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut doc = GraphDocument::default();
    for i in 0..n {
        doc.add_node(PaperNode::new(format!("p{i:04}"), format!("Paper {i}"))).unwrap();
    }
    for _ in 0..edges {
        let a = rng.gen_range(0..n);
        let b = rng.gen_range(0..n);
        if a != b {
            let e = TypedEdge::new(doc.nodes[a].id.clone(), doc.nodes[b].id.clone(), EdgeKind::Thematic, 0.5, Provenance::ProviderRecommendation);
            doc.add_edge(e).unwrap();
        }
    }
    for node in &doc.nodes {
        let p = [rng.gen_range(-spread..spread), rng.gen_range(-spread..spread), rng.gen_range(-spread..spread)];
        doc.layout.positions.insert(node.id.clone(), p);
    }
    doc
}

fn max_relative_gap(doc: &GraphDocument, cfg: &ForceConfig) -> f64 {
    let exact = layout::manybody_forces(&doc.layout, doc, cfg, ManyBody::Exact).unwrap();
    let tree = layout::manybody_forces(&doc.layout, doc, cfg, ManyBody::BarnesHut { theta: 0.0 }).unwrap();
    exact
        .iter()
        .map(|(id, f)| {
            let g = tree[id];
            let diff = vec3::norm(&vec3::sub(*f, g));
            let scale = vec3::norm(f);
            if scale == 0.0 { diff } else { diff / scale }
        })
        .fold(0.0, f64::max)
}

#[test]
fn barnes_hut_theta_zero_matches_direct_sum_on_100_nodes() {
    let doc = random_graph(100, 150, 11, 100.0);
    let gap = max_relative_gap(&doc, &ForceConfig::default());
    assert!(gap <= 1e-12, "max relative gap {gap:e}");
}

#[test]
fn barnes_hut_default_theta_is_close() {
    let doc = random_graph(300, 400, 5, 150.0);
    let cfg = ForceConfig::default();
    let exact = layout::manybody_forces(&doc.layout, &doc, &cfg, ManyBody::Exact).unwrap();
    let approx = layout::manybody_forces(&doc.layout, &doc, &cfg, ManyBody::BarnesHut { theta: 0.9 }).unwrap();
    let (mut num, mut den) = (0.0, 0.0);
    for (id, f) in &exact {
        num += vec3::norm(&vec3::sub(*f, approx[id])).powi(2);
        den += vec3::norm(f).powi(2);
    }
    assert!((num / den).sqrt() < 0.1);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]
    #[test]
    fn octree_equals_direct_sum(n in 1usize..500, seed in any::<u64>(), spread in 1.0f64..500.0) {
        let doc = random_graph(n, n, seed, spread);
        let gap = max_relative_gap(&doc, &ForceConfig::default());
        prop_assert!(gap <= 1e-12, "gap {:e}", gap);
    }
}

/// Scalar separation rate for two linked nodes at distance `d`:
/// spring contraction plus the pair's mutual repulsion. Zero at equilibrium.
pub fn two_node_balance(d: f64, cfg: &ForceConfig) -> f64 {
    let spring = -(d - cfg.link_distance);
    let mut l = d * d;
    let min2 = cfg.distance_min * cfg.distance_min;
    if l < min2 {
        l = (min2 * l).sqrt();
    }
    let repulsion = -2.0 * cfg.manybody_strength * d / l;
    spring + repulsion
}

pub fn bisect(cfg: &ForceConfig) -> f64 {
    let (mut lo, mut hi) = (1e-9, 10.0 * cfg.link_distance);
    assert!(two_node_balance(lo, cfg) > 0.0 && two_node_balance(hi, cfg) < 0.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if two_node_balance(mid, cfg) > 0.0 { lo = mid } else { hi = mid }
    }
    0.5 * (lo + hi)
}

fn simulated_separation(cfg: &ForceConfig) -> f64 {
    let mut doc = GraphDocument::default();
    doc.add_node(PaperNode::new("a", "A")).unwrap();
    doc.add_node(PaperNode::new("b", "B")).unwrap();
    doc.add_edge(TypedEdge::new("a", "b", EdgeKind::Citation, 1.0, Provenance::CitationGraph)).unwrap();
    doc.run_layout(cfg, 10_000).unwrap();
    let p = &doc.layout.positions;
    vec3::norm(&vec3::sub(p[&PaperId::from("a")], p[&PaperId::from("b")]))
}

#[test]
fn two_node_equilibrium_matches_bisection() {
    let cfg = ForceConfig::default();
    let root = bisect(&cfg);
    assert!((root - 31.881943016134134).abs() < 1e-9);
    let sim = simulated_separation(&cfg);
    assert!(((sim - root) / root).abs() < 0.01, "sim {sim} root {root}");
}

#[test]
fn unpinned_node_moves_when_net_force_nonzero() {
    let cfg = ForceConfig::default();
    let root = bisect(&cfg);
    let mut doc = GraphDocument::default();
    doc.add_node(PaperNode::new("a", "A")).unwrap();
    doc.add_node(PaperNode::new("b", "B")).unwrap();
    doc.add_edge(TypedEdge::new("a", "b", EdgeKind::Citation, 1.0, Provenance::CitationGraph)).unwrap();
    // pin b at twice the equilibrium distance: balance < 0 there, so the spring pulls it in
    let far = 2.0 * root;
    assert!(two_node_balance(far, &cfg) < 0.0);
    doc.layout.pin(&"a".into(), [0.0; 3]).unwrap();
    doc.layout.pin(&"b".into(), [far, 0.0, 0.0]).unwrap();
    for _ in 0..5 {
        doc.tick(&cfg).unwrap();
    }
    assert_eq!(doc.layout.positions[&PaperId::from("b")], [far, 0.0, 0.0]);
    doc.layout.unpin(&"b".into()).unwrap();
    doc.tick(&cfg).unwrap();
    let moved = doc.layout.positions[&PaperId::from("b")];
    assert!(moved[0] < far, "{moved:?}");
}

#[test]
fn equilateral_triangle_stays_equilateral() {
    let mut doc = GraphDocument::default();
    for id in ["a", "b", "c"] {
        doc.add_node(PaperNode::new(id, id)).unwrap();
    }
    for (s, t) in [("a", "b"), ("b", "c"), ("c", "a")] {
        doc.add_edge(TypedEdge::new(s, t, EdgeKind::Thematic, 1.0, Provenance::ProviderRecommendation)).unwrap();
    }
    doc.run_layout(&ForceConfig::default(), 300).unwrap();
    let p = |id: &str| doc.layout.positions[&PaperId::from(id)];
    let d = [
        vec3::norm(&vec3::sub(p("a"), p("b"))),
        vec3::norm(&vec3::sub(p("b"), p("c"))),
        vec3::norm(&vec3::sub(p("c"), p("a"))),
    ];
    let mean = d.iter().sum::<f64>() / 3.0;
    for x in d {
        assert!(((x - mean) / mean).abs() < 0.005, "{d:?}");
    }
}
