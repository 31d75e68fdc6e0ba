//! Brute-force reference implementations checked against the library on
//! random small instances.

use ransomguard::nlp::tfidf::{smooth_idf, TfIdfModel};

mod common;

use common::oracle::{check_chi2, check_mnb, check_tfidf_norm, INSTANCES};

#[test]
fn chi2_scores_and_selection_match_brute_force() {
    check_chi2(INSTANCES, 0x5eed_c412).unwrap();
}

#[test]
fn mnb_posteriors_match_brute_force() {
    check_mnb(INSTANCES, 0x0b_a7e5).unwrap();
}

#[test]
fn tfidf_vectors_have_unit_norm() {
    check_tfidf_norm(INSTANCES, 7).unwrap();
}

#[test]
fn tfidf_weights_match_hand_computation() {
    let docs = vec![vec!["a", "b", "b"], vec!["b", "c"], vec!["c"]];
    let model = TfIdfModel::fit(&docs).unwrap();
    // idf(t) = ln((1 + n) / (1 + df)) + 1 with n = 3
    let idf = |df: f64| (4.0f64 / (1.0 + df)).ln() + 1.0;
    assert!((smooth_idf(3, 2) - idf(2.0)).abs() < 1e-12);
    let v = model.transform(&docs[0]);
    let (wa, wb) = (idf(1.0), 2.0 * idf(2.0));
    let norm = (wa * wa + wb * wb).sqrt();
    let a = model.index_of("a").unwrap();
    let b = model.index_of("b").unwrap();
    assert!((v.get(a) - wa / norm).abs() < 1e-12);
    assert!((v.get(b) - wb / norm).abs() < 1e-12);
}
