mod common;

use std::sync::atomic::Ordering;

use common::{fixtures, response_ids, stored_response};
use litforage_core::provider::{Field, MetadataProvider};
use litforage_core::PaperId;
use serde_json::json;

fn ids(records: &[litforage_core::provider::PaperRecord]) -> Vec<String> {
    records.iter().map(|r| r.id.to_string()).collect()
}

#[test]
fn stored_record_is_returned_verbatim() {
    let f = fixtures();
    let stored = stored_response(f.dir.path(), "paper", &[("id", json!("fdl-01"))]).unwrap();
    let record = f.client.get_paper(&"fdl-01".into(), &Field::all()).unwrap();
    assert_eq!(serde_json::to_value(&record).unwrap(), stored);
}

#[test]
fn unrequested_fields_are_absent() {
    let f = fixtures();
    let fields = [Field::Title].into_iter().collect();
    let record = f.client.get_paper(&"fdl-01".into(), &fields).unwrap();
    assert!(record.title.is_some());
    assert!(record.abstract_text.is_none() && record.authors.is_none() && record.citations.is_none());
}

#[test]
fn unknown_ids_are_not_found() {
    let f = fixtures();
    let err = f.client.get_paper(&"nope".into(), &Field::all()).unwrap_err();
    assert!(err.is_not_found(), "{err}");
    assert_eq!(err.exit_code(), 3);
    let err = f.client.get_author_papers("a-999", 5).unwrap_err();
    assert!(err.is_not_found(), "{err}");
}

#[test]
fn repeated_lookup_hits_the_cache() {
    let f = fixtures();
    let a = f.client.get_paper(&"vr-01".into(), &Field::all()).unwrap();
    let before = f.client.stats();
    let b = f.client.get_paper(&"vr-01".into(), &Field::all()).unwrap();
    let after = f.client.stats();
    assert_eq!(a, b);
    assert_eq!(after.provider_requests, before.provider_requests);
    assert_eq!(after.cache_hits, before.cache_hits + 1);
}

#[test]
fn reference_and_citation_lists_follow_the_fixture() {
    let f = fixtures();
    let stored = stored_response(f.dir.path(), "references", &[("id", json!("fdl-01"))]).unwrap();
    assert_eq!(ids(&f.client.get_references(&"fdl-01".into(), 10).unwrap()), response_ids(&stored));
    assert_eq!(response_ids(&stored), vec!["fdl-02", "fdl-03", "fdl-04"]);
    assert!(f.client.get_references(&"lit-10".into(), 10).unwrap().is_empty());
    let citing: Vec<String> = f.corpus.citations_of(&"fdl-02".into()).iter().map(|p| p.to_string()).collect();
    assert_eq!(ids(&f.client.get_citations(&"fdl-02".into(), 100).unwrap()), citing);
}

#[test]
fn zero_limit_makes_no_request() {
    let f = fixtures();
    assert!(f.client.get_citations(&"fdl-01".into(), 0).unwrap().is_empty());
    assert!(f.client.get_recommendations(&["fdl-01".into()], 0).unwrap().is_empty());
    assert_eq!(f.client.stats().provider_requests, 0);
}

#[test]
fn author_papers_respect_limit_and_order() {
    let f = fixtures();
    let stored = stored_response(f.dir.path(), "author_papers", &[("author_id", json!("a-101"))]).unwrap();
    let all = response_ids(&stored);
    assert_eq!(all.len(), 4);
    assert_eq!(ids(&f.client.get_author_papers("a-101", 2).unwrap()), all[..2].to_vec());
    assert_eq!(ids(&f.client.get_author_papers("a-101", 50).unwrap()), all);
}

#[test]
fn recommendations_exclude_seeds() {
    let f = fixtures();
    let stored = stored_response(f.dir.path(), "recommendations", &[("seeds", json!("fdl-01"))]).unwrap();
    assert_eq!(ids(&f.client.get_recommendations(&["fdl-01".into()], 2).unwrap()), response_ids(&stored)[..2].to_vec());

    // this stored result list contains one of its own seeds
    let seeds: Vec<PaperId> = vec!["vr-01".into(), "fdl-01".into()];
    let stored = stored_response(f.dir.path(), "recommendations", &[("seeds", json!("fdl-01,vr-01"))]).unwrap();
    let raw = response_ids(&stored);
    assert!(raw.iter().any(|id| id == "vr-01"));
    let got = ids(&f.client.get_recommendations(&seeds, 10).unwrap());
    let expected: Vec<String> = raw.into_iter().filter(|id| id != "vr-01" && id != "fdl-01").collect();
    assert_eq!(got, expected);

    assert_eq!(f.client.get_recommendations(&[], 3).unwrap_err().exit_code(), 2);
}

#[test]
fn fixture_mode_never_touches_the_network() {
    let f = fixtures();
    for p in &f.corpus.papers {
        f.client.get_paper(&p.id, &Field::all()).unwrap();
        f.client.get_citations(&p.id, 5).unwrap();
        f.client.get_references(&p.id, 5).unwrap();
        f.client.get_recommendations(std::slice::from_ref(&p.id), 5).unwrap();
    }
    let _ = f.client.get_paper(&"missing".into(), &Field::all());
    assert_eq!(f.tripwire.attempts.load(Ordering::SeqCst), 0);
}

#[test]
fn seeds_naming_the_same_paper_collapse() {
    use litforage_core::provider::{Endpoint, FixtureStore, RequestKey};
    use litforage_core::{Command, Engine, GraphDocument};

    let f = common::fixtures();
    let store = FixtureStore::new(f.dir.path());
    let record = store.read(&RequestKey::new(Endpoint::Paper, &[("id", "fdl-01")])).unwrap();
    store.write(&RequestKey::new(Endpoint::Paper, &[("id", "DOI:10.1000/alias")]), &record).unwrap();
    let engine = Engine::new(std::sync::Arc::new(f.client));
    let mut doc = GraphDocument::default();
    let ids = vec!["fdl-01".into(), "DOI:10.1000/alias".into(), "vr-01".into()];
    engine.execute(&mut doc, &Command::Seed { ids, topic: None, layout_seed: 0 }, 1).unwrap();
    let got: Vec<&str> = doc.nodes.iter().map(|n| n.id.as_str()).collect();
    assert_eq!(got, vec!["fdl-01", "vr-01"]);
}
