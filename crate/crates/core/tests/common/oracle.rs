//! Brute-force reference implementations of the ranking and classifier math.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ransomguard::nlp::chi2::{chi2_scores, chi2_select};
use ransomguard::nlp::naive_bayes::fit_mnb;
use ransomguard::nlp::tfidf::{SparseVector, TfIdfModel};
use ransomguard::nlp::Label;

pub const INSTANCES: usize = 1500;
pub const TOL: f64 = 1e-9;

pub struct Instance {
    pub rows: Vec<Vec<f64>>,
    pub labels: Vec<Label>,
    pub n_features: usize,
}

/// Up to 6 documents and 10 features, both classes present, with some exact
/// zeros so empty features and ties show up.
pub fn random_instance(rng: &mut ChaCha8Rng) -> Instance {
    let n_docs = rng.random_range(2..=6);
    let n_features = rng.random_range(1..=10);
    let mut labels: Vec<Label> = (0..n_docs)
        .map(|_| if rng.random_bool(0.5) { Label::Ransom } else { Label::Benign })
        .collect();
    labels[0] = Label::Ransom;
    labels[1] = Label::Benign;
    let rows = (0..n_docs)
        .map(|_| {
            (0..n_features)
                .map(|_| match rng.random_range(0..4) {
                    0 => 0.0,
                    1 => f64::from(rng.random_range(1..4u8)),
                    _ => rng.random::<f64>(),
                })
                .collect()
        })
        .collect();
    Instance {
        rows,
        labels,
        n_features,
    }
}

pub fn sparse(rows: &[Vec<f64>]) -> Vec<SparseVector> {
    rows.iter()
        .map(|r| SparseVector::from_pairs(r.iter().copied().enumerate().filter(|(_, v)| *v != 0.0)))
        .collect()
}

/// Contingency form: per feature, a 2-cell table of observed class mass
/// against the mass each class would get in proportion to its documents.
pub fn chi2_oracle(inst: &Instance) -> Vec<f64> {
    let n = inst.labels.len() as f64;
    let n_ransom = inst.labels.iter().filter(|l| **l == Label::Ransom).count() as f64;
    (0..inst.n_features)
        .map(|f| {
            let mut ransom = 0.0;
            let mut benign = 0.0;
            for (row, label) in inst.rows.iter().zip(&inst.labels) {
                match label {
                    Label::Ransom => ransom += row[f],
                    Label::Benign => benign += row[f],
                }
            }
            let total = ransom + benign;
            let e_ransom = total * n_ransom / n;
            let e_benign = total * (n - n_ransom) / n;
            let cell = |o: f64, e: f64| if e > 0.0 { (o - e) * (o - e) / e } else { 0.0 };
            cell(ransom, e_ransom) + cell(benign, e_benign)
        })
        .collect()
}

/// Exhaustive search over all k-subsets: the best total score wins, and
/// among equal totals the lexicographically smallest index set.
pub fn select_oracle(scores: &[f64], k: usize) -> Vec<usize> {
    let n = scores.len();
    let mut best: Option<(f64, Vec<usize>)> = None;
    for mask in 0u32..(1 << n) {
        if mask.count_ones() as usize != k {
            continue;
        }
        let set: Vec<usize> = (0..n).filter(|i| mask & (1 << i) != 0).collect();
        let total: f64 = set.iter().map(|&i| scores[i]).sum();
        best = match best {
            None => Some((total, set)),
            Some((bt, bs)) => {
                if total > bt + 1e-12 || ((total - bt).abs() <= 1e-12 && set < bs) {
                    Some((total, set))
                } else {
                    Some((bt, bs))
                }
            }
        };
    }
    best.map(|(_, s)| s).unwrap_or_default()
}

/// Posterior computed in probability space from raw class and feature mass.
pub fn mnb_oracle(inst: &Instance, alpha: f64, x: &[f64]) -> [f64; 2] {
    let mut joint = [0.0f64; 2];
    for (c, class) in [Label::Benign, Label::Ransom].into_iter().enumerate() {
        let members: Vec<&Vec<f64>> = inst
            .rows
            .iter()
            .zip(&inst.labels)
            .filter(|(_, l)| **l == class)
            .map(|(r, _)| r)
            .collect();
        let prior = members.len() as f64 / inst.rows.len() as f64;
        let class_mass: f64 = members.iter().flat_map(|r| r.iter()).sum();
        let mut p = prior;
        for (f, xf) in x.iter().enumerate() {
            let feature_mass: f64 = members.iter().map(|r| r[f]).sum();
            let theta = (feature_mass + alpha) / (class_mass + alpha * inst.n_features as f64);
            p *= theta.powf(*xf);
        }
        joint[c] = p;
    }
    let z = joint[0] + joint[1];
    [joint[0] / z, joint[1] / z]
}

/// Chi-squared scores and top-k selections on `n` random instances.
pub fn check_chi2(n: usize, seed: u64) -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for case in 0..n {
        let inst = random_instance(&mut rng);
        let x = sparse(&inst.rows);
        let got = chi2_scores(&x, &inst.labels, inst.n_features).map_err(|e| e.to_string())?;
        let want = chi2_oracle(&inst);
        for (f, (g, w)) in got.iter().zip(&want).enumerate() {
            if (g - w).abs() > TOL * w.abs().max(1.0) {
                return Err(format!("case {case} feature {f}: {g} vs {w}"));
            }
        }
        let k = rng.random_range(1..=inst.n_features);
        let sel = chi2_select(&x, &inst.labels, inst.n_features, k).map_err(|e| e.to_string())?;
        let expected = select_oracle(&want, k);
        if sel.selected != expected {
            return Err(format!("case {case} k={k}: selected {:?}, expected {expected:?}", sel.selected));
        }
    }
    Ok(())
}

/// MNB posteriors and labels on `n` random instances.
pub fn check_mnb(n: usize, seed: u64) -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for case in 0..n {
        let inst = random_instance(&mut rng);
        let alpha = [1.0, 0.5, 0.1, 2.0][case % 4];
        let model = fit_mnb(&inst.rows, &inst.labels, alpha).map_err(|e| e.to_string())?;
        let query: Vec<f64> = (0..inst.n_features).map(|_| rng.random::<f64>() * 2.0).collect();
        let got = model.predict(&query);
        let want = mnb_oracle(&inst, alpha, &query);
        for c in 0..2 {
            let g = got.log_posterior[c].exp();
            if (g - want[c]).abs() > TOL {
                return Err(format!("case {case} class {c}: {g} vs {}", want[c]));
            }
        }
        let oracle_label = if want[1] > want[0] { Label::Ransom } else { Label::Benign };
        if (want[1] - want[0]).abs() > 1e-9 && got.label != oracle_label {
            return Err(format!("case {case}: label {:?} vs {oracle_label:?}", got.label));
        }
    }
    Ok(())
}

/// Every nonzero TF-IDF vector over `n` random corpora has unit L2 norm.
pub fn check_tfidf_norm(n: usize, seed: u64) -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vocab = ["pay", "bitcoin", "files", "match", "goal", "key", "decrypt", "the", "team", "news"];
    for case in 0..n {
        let n_docs = rng.random_range(1..=6);
        let docs: Vec<Vec<&str>> = (0..n_docs)
            .map(|_| {
                let len = rng.random_range(0..12);
                (0..len).map(|_| vocab[rng.random_range(0..vocab.len())]).collect()
            })
            .collect();
        if docs.iter().all(Vec::is_empty) {
            continue;
        }
        let model = TfIdfModel::fit(&docs).map_err(|e| e.to_string())?;
        for doc in &docs {
            let v = model.transform(doc);
            if !v.is_zero() && (v.l2_norm() - 1.0).abs() > TOL {
                return Err(format!("case {case}: norm {}", v.l2_norm()));
            }
        }
        if !model.transform(&["zebra", "quartz"]).is_zero() {
            return Err(format!("case {case}: unseen tokens produced weight"));
        }
    }
    Ok(())
}
