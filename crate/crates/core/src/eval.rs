//! Evaluation: topic matching, test-time mixture inference, and
//! prediction/reconstruction metrics.
//!
//! Recovered topics come back in eigenvalue order, not the ground-truth
//! order, so every parameter-error metric is computed after a minimum-cost
//! bipartite matching of topic columns. Topic mixtures of held-out
//! documents are inferred with a collapsed Gibbs sampler (the mixture `h`
//! integrated out analytically); tiny documents can instead be scored by
//! exact enumeration, which doubles as the sampler's test oracle.

use std::collections::BTreeSet;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::corpus::{Corpus, Document};
use crate::error::{Error, Result};
use crate::model::SldaModel;
use crate::seeding::{derive, Domain};

/// A minimum-cost alignment of recovered topics to ground-truth topics.
#[derive(Debug, Clone, PartialEq)]
pub struct TopicMatching {
    /// `permutation[i]` is the recovered topic matched to truth topic `i`.
    pub permutation: Vec<usize>,
    /// Total L1 distance between matched topic columns.
    pub cost: f64,
}

/// Minimum-cost bipartite assignment (Jonker–Volgenant style Hungarian
/// algorithm with potentials, O(k³)) on a dense k×k cost matrix.
/// Returns the row→column assignment and its total cost.
fn hungarian(cost: &[Vec<f64>]) -> (Vec<usize>, f64) {
    let n = cost.len();
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut matched_row = vec![0usize; n + 1]; // column j ← row matched_row[j]; 0 = free
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        matched_row[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = matched_row[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[matched_row[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if matched_row[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            matched_row[j0] = matched_row[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0usize; n];
    for j in 1..=n {
        assignment[matched_row[j] - 1] = j - 1;
    }
    let total = (0..n).map(|i| cost[i][assignment[i]]).sum();
    (assignment, total)
}

/// Match recovered topics to ground-truth topics by minimizing the total
/// L1 distance between topic columns over all bijections.
pub fn match_topics(truth: &SldaModel, recovered: &SldaModel) -> Result<TopicMatching> {
    if truth.k() != recovered.k() || truth.vocab_size() != recovered.vocab_size() {
        return Err(Error::DimensionMismatch(format!(
            "cannot match a {}-topic/{}-word model against a {}-topic/{}-word model",
            truth.k(),
            truth.vocab_size(),
            recovered.k(),
            recovered.vocab_size()
        )));
    }
    let k = truth.k();
    let cost: Vec<Vec<f64>> = (0..k)
        .map(|i| {
            (0..k)
                .map(|j| {
                    (truth.topics().column(i) - recovered.topics().column(j))
                        .iter()
                        .map(|x| x.abs())
                        .sum()
                })
                .collect()
        })
        .collect();
    let (permutation, cost) = hungarian(&cost);
    Ok(TopicMatching { permutation, cost })
}

/// Settings of the collapsed Gibbs sampler used for test-time inference.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct GibbsConfig {
    /// Discarded sweeps before averaging begins.
    pub burnin: usize,
    /// Retained sweeps averaged into the mixture estimate.
    pub samples: usize,
    pub seed: u64,
}

impl Default for GibbsConfig {
    fn default() -> Self {
        GibbsConfig { burnin: 200, samples: 200, seed: 0 }
    }
}

/// Per-token topic probabilities for one document, with add-epsilon
/// smoothing for words carrying zero mass in every topic.
fn token_word_probs(
    doc: &Document,
    model: &SldaModel,
    warnings: &mut Vec<String>,
) -> Result<Vec<(usize, Vec<f64>)>> {
    let k = model.k();
    let mut per_word = Vec::with_capacity(doc.counts.len());
    for &(word, count) in &doc.counts {
        let w = word as usize;
        if w >= model.vocab_size() {
            return Err(Error::DimensionMismatch(format!(
                "document contains word id {w} but the model vocabulary has {} words",
                model.vocab_size()
            )));
        }
        let mut probs: Vec<f64> = (0..k).map(|t| model.topics()[(w, t)]).collect();
        if probs.iter().sum::<f64>() <= 0.0 {
            for p in &mut probs {
                *p += 1e-12;
            }
            warnings.push(format!(
                "word {w} has zero probability under every topic; applied 1e-12 smoothing"
            ));
        }
        per_word.push((count as usize, probs));
    }
    let mut tokens = Vec::with_capacity(doc.num_tokens() as usize);
    for (count, probs) in per_word {
        for _ in 0..count {
            tokens.push((0usize, probs.clone()));
        }
    }
    // the first tuple slot later holds the current topic assignment
    Ok(tokens)
}

fn sample_index(weights: &[f64], rng: &mut ChaCha8Rng) -> usize {
    let total: f64 = weights.iter().sum();
    let mut r = rng.random::<f64>() * total;
    for (i, &w) in weights.iter().enumerate() {
        r -= w;
        if r <= 0.0 {
            return i;
        }
    }
    weights.len() - 1
}

/// Infer a document's topic mixture by collapsed Gibbs sampling.
///
/// Word-topic assignments `z` are resampled with the mixture integrated
/// out — `P(z_j = t | z_{−j}, w_j) ∝ (α_t + n_t^{−j})·μ_{t,w_j}` — and the
/// mixture estimate is the average of `(α + n_z)/(α₀ + m)` over retained
/// sweeps. Deterministic given the seed. Returns the estimate (a point on
/// the simplex) plus any smoothing warnings.
pub fn infer_mixture_gibbs(
    doc: &Document,
    model: &SldaModel,
    cfg: &GibbsConfig,
) -> Result<(DVector<f64>, Vec<String>)> {
    if cfg.samples == 0 {
        return Err(Error::InvalidConfig("need at least one retained Gibbs sweep".into()));
    }
    let k = model.k();
    let alpha = model.alpha();
    let a0 = model.alpha0();
    let mut warnings = Vec::new();
    let mut tokens = token_word_probs(doc, model, &mut warnings)?;
    let m = tokens.len() as f64;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut topic_counts = vec![0.0f64; k];
    let mut weights = vec![0.0f64; k];
    for (assignment, probs) in &mut tokens {
        for t in 0..k {
            weights[t] = alpha[t] * probs[t];
        }
        *assignment = sample_index(&weights, &mut rng);
        topic_counts[*assignment] += 1.0;
    }

    let mut accum = DVector::zeros(k);
    for sweep in 0..cfg.burnin + cfg.samples {
        for (assignment, probs) in &mut tokens {
            topic_counts[*assignment] -= 1.0;
            for t in 0..k {
                weights[t] = (alpha[t] + topic_counts[t]) * probs[t];
            }
            *assignment = sample_index(&weights, &mut rng);
            topic_counts[*assignment] += 1.0;
        }
        if sweep >= cfg.burnin {
            for t in 0..k {
                accum[t] += (alpha[t] + topic_counts[t]) / (a0 + m);
            }
        }
    }
    Ok((accum / cfg.samples as f64, warnings))
}

/// Exact posterior mean of the topic mixture by enumerating every
/// word-topic assignment — O(kᵐ), intended for tiny documents and as the
/// oracle the Gibbs sampler is tested against.
pub fn infer_mixture_exact(doc: &Document, model: &SldaModel) -> Result<DVector<f64>> {
    let k = model.k();
    let m = doc.num_tokens();
    if (k as f64).powf(m as f64) > 1e7 {
        return Err(Error::InvalidConfig(format!(
            "exact enumeration over {k}^{m} assignments is infeasible; use Gibbs inference"
        )));
    }
    let mut warnings = Vec::new();
    let tokens = token_word_probs(doc, model, &mut warnings)?;
    let m = tokens.len();
    let alpha = model.alpha();
    let a0 = model.alpha0();

    let mut total = 0.0;
    let mut acc = DVector::zeros(k);
    let states = (k as u64).pow(m as u32);
    for code in 0..states {
        let mut c = code;
        let mut counts = vec![0usize; k];
        let mut word_term = 1.0;
        for (_, probs) in &tokens {
            let t = (c % k as u64) as usize;
            c /= k as u64;
            counts[t] += 1;
            word_term *= probs[t];
        }
        // Dirichlet–multinomial prior weight: ∏_t α_t·(α_t+1)···(α_t+n_t−1)
        let mut prior = 1.0;
        for t in 0..k {
            for r in 0..counts[t] {
                prior *= alpha[t] + r as f64;
            }
        }
        let p = word_term * prior;
        total += p;
        for t in 0..k {
            acc[t] += p * (alpha[t] + counts[t] as f64);
        }
    }
    if !(total > 0.0) {
        return Err(Error::InvalidModel(
            "document has zero likelihood under every assignment".into(),
        ));
    }
    Ok(acc / (total * (a0 + m as f64)))
}

/// Mean squared error and predictive R² of predictions against responses.
/// `pr2` is `None` (undefined) when the responses have zero variance.
fn prediction_metrics(y: &[f64], y_hat: &[f64]) -> (f64, Option<f64>, Vec<String>) {
    let n = y.len() as f64;
    let ss_res: f64 = y.iter().zip(y_hat).map(|(a, b)| (a - b) * (a - b)).sum();
    let mean = y.iter().sum::<f64>() / n;
    let ss_tot: f64 = y.iter().map(|a| (a - mean) * (a - mean)).sum();
    let mse = ss_res / n;
    if ss_tot > 0.0 {
        (mse, Some(1.0 - ss_res / ss_tot), Vec::new())
    } else {
        (
            mse,
            None,
            vec!["test responses have zero variance; predictive R² is undefined".into()],
        )
    }
}

/// Per-topic parameter error after matching.
#[derive(Debug, Clone, Serialize)]
pub struct PerTopicRow {
    pub truth_topic: usize,
    pub matched_topic: usize,
    pub l1_mu: f64,
    pub abs_alpha_err: f64,
    pub abs_eta_err: f64,
}

/// Parameter-reconstruction errors, available only when ground truth is.
#[derive(Debug, Clone, Serialize)]
pub struct ParamErrors {
    /// Total L1 error of the prior vector after matching.
    pub l1_alpha: f64,
    /// Total L1 error of the regression weights after matching.
    pub l1_eta: f64,
    /// Total L1 error of the topic columns (the matching cost).
    pub l1_mu: f64,
    pub sigma_abs_err: f64,
    /// `permutation[i]` is the recovered topic matched to truth topic `i`.
    pub permutation: Vec<usize>,
    pub per_topic: Vec<PerTopicRow>,
}

/// Held-out evaluation of a recovered model.
#[derive(Debug, Clone, Serialize)]
pub struct EvalReport {
    pub num_test_docs: usize,
    /// Mean squared prediction error of `ŷ = η̂ᵀĥ`.
    pub mse: f64,
    /// Predictive R²; `None` when the test responses are constant.
    pub pr2: Option<f64>,
    /// Negative mean per-token log-likelihood under the mixed topics.
    pub neg_perword_ll: f64,
    /// Present only when a ground-truth model was supplied.
    pub params: Option<ParamErrors>,
    pub warnings: Vec<String>,
}

/// Evaluate a recovered model on a test corpus: infer each document's
/// mixture (collapsed Gibbs, parallel over documents with per-document
/// seeds), predict responses, and score predictions and token likelihoods.
/// With a ground-truth model, parameter errors are added after topic
/// matching.
pub fn evaluate(
    truth: Option<&SldaModel>,
    recovered: &SldaModel,
    test: &Corpus,
    gibbs: &GibbsConfig,
) -> Result<EvalReport> {
    if recovered.vocab_size() != test.vocab_size() {
        return Err(Error::DimensionMismatch(format!(
            "model vocabulary ({}) does not match test corpus vocabulary ({})",
            recovered.vocab_size(),
            test.vocab_size()
        )));
    }

    let per_doc: Vec<(DVector<f64>, Vec<String>)> = test
        .documents()
        .par_iter()
        .enumerate()
        .map(|(d, doc)| {
            let cfg = GibbsConfig {
                seed: derive(gibbs.seed, Domain::GibbsDoc, d as u64),
                ..*gibbs
            };
            infer_mixture_gibbs(doc, recovered, &cfg)
        })
        .collect::<Result<_>>()?;

    let eta = DVector::from_column_slice(recovered.eta());
    let mut warnings: BTreeSet<String> = BTreeSet::new();
    let mut y = Vec::with_capacity(test.num_docs());
    let mut y_hat = Vec::with_capacity(test.num_docs());
    let mut log_lik = 0.0f64;
    for (doc, (h, doc_warnings)) in test.documents().iter().zip(&per_doc) {
        warnings.extend(doc_warnings.iter().cloned());
        y.push(doc.response);
        y_hat.push(eta.dot(h));
        for &(word, count) in &doc.counts {
            let p: f64 =
                (0..recovered.k()).map(|t| h[t] * recovered.topics()[(word as usize, t)]).sum();
            if p > 0.0 {
                log_lik += count as f64 * p.ln();
            } else {
                log_lik = f64::NEG_INFINITY;
                warnings.insert(format!(
                    "word {word} has zero probability under the inferred mixture; \
                     per-word log-likelihood is infinite"
                ));
            }
        }
    }
    let neg_perword_ll = -log_lik / test.total_tokens() as f64;

    let (mse, pr2, metric_warnings) = prediction_metrics(&y, &y_hat);
    warnings.extend(metric_warnings);

    let params = match truth {
        None => None,
        Some(truth) => {
            let matching = match_topics(truth, recovered)?;
            let mut per_topic = Vec::with_capacity(truth.k());
            let mut l1_alpha = 0.0;
            let mut l1_eta = 0.0;
            for (i, &j) in matching.permutation.iter().enumerate() {
                let l1_mu = (truth.topics().column(i) - recovered.topics().column(j))
                    .iter()
                    .map(|x| x.abs())
                    .sum();
                let abs_alpha_err = (truth.alpha()[i] - recovered.alpha()[j]).abs();
                let abs_eta_err = (truth.eta()[i] - recovered.eta()[j]).abs();
                l1_alpha += abs_alpha_err;
                l1_eta += abs_eta_err;
                per_topic.push(PerTopicRow {
                    truth_topic: i,
                    matched_topic: j,
                    l1_mu,
                    abs_alpha_err,
                    abs_eta_err,
                });
            }
            Some(ParamErrors {
                l1_alpha,
                l1_eta,
                l1_mu: matching.cost,
                sigma_abs_err: (truth.sigma() - recovered.sigma()).abs(),
                permutation: matching.permutation,
                per_topic,
            })
        }
    };

    Ok(EvalReport {
        num_test_docs: test.num_docs(),
        mse,
        pr2,
        neg_perword_ll,
        params,
        warnings: warnings.into_iter().collect(),
    })
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(|v| format!("{v}")).unwrap_or_default()
}

impl EvalReport {
    /// Human-readable multi-line summary.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("test documents        {}\n", self.num_test_docs));
        out.push_str(&format!("mse                   {:.6}\n", self.mse));
        match self.pr2 {
            Some(pr2) => out.push_str(&format!("predictive R^2        {pr2:.6}\n")),
            None => out.push_str("predictive R^2        undefined (constant responses)\n"),
        }
        out.push_str(&format!("neg per-word loglik   {:.6}\n", self.neg_perword_ll));
        if let Some(p) = &self.params {
            out.push_str(&format!(
                "L1 error              alpha {:.6}  eta {:.6}  mu {:.6}  |sigma| {:.6}\n",
                p.l1_alpha, p.l1_eta, p.l1_mu, p.sigma_abs_err
            ));
            out.push_str("topic  matched  l1_mu      |alpha err|  |eta err|\n");
            for row in &p.per_topic {
                out.push_str(&format!(
                    "{:<6} {:<8} {:<10.6} {:<12.6} {:<10.6}\n",
                    row.truth_topic, row.matched_topic, row.l1_mu, row.abs_alpha_err,
                    row.abs_eta_err
                ));
            }
        }
        for w in &self.warnings {
            out.push_str(&format!("warning: {w}\n"));
        }
        out
    }

    /// Column names matching [`EvalReport::to_csv_row`].
    pub fn csv_header() -> &'static str {
        "num_test_docs,mse,pr2,neg_perword_ll,l1_alpha,l1_eta,l1_mu,sigma_abs_err"
    }

    /// One flat CSV row; unavailable fields are left empty.
    pub fn to_csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{}",
            self.num_test_docs,
            self.mse,
            fmt_opt(self.pr2),
            self.neg_perword_ll,
            fmt_opt(self.params.as_ref().map(|p| p.l1_alpha)),
            fmt_opt(self.params.as_ref().map(|p| p.l1_eta)),
            fmt_opt(self.params.as_ref().map(|p| p.l1_mu)),
            fmt_opt(self.params.as_ref().map(|p| p.sigma_abs_err)),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{generate_corpus, sample_model};
    use approx::assert_abs_diff_eq;
    use nalgebra::DMatrix;

    fn permutations(k: usize) -> Vec<Vec<usize>> {
        if k == 1 {
            return vec![vec![0]];
        }
        let mut out = Vec::new();
        for sub in permutations(k - 1) {
            for pos in 0..k {
                let mut p: Vec<usize> = sub.iter().map(|&x| if x >= pos { x + 1 } else { x }).collect();
                p.insert(0, pos);
                out.push(p);
            }
        }
        out
    }

    fn brute_force_min(cost: &[Vec<f64>]) -> f64 {
        permutations(cost.len())
            .into_iter()
            .map(|p| (0..cost.len()).map(|i| cost[i][p[i]]).sum::<f64>())
            .fold(f64::INFINITY, f64::min)
    }

    #[test]
    fn hungarian_matches_exhaustive_search() {
        let mut rng = ChaCha8Rng::seed_from_u64(100);
        for case in 0..100 {
            let k = 2 + case % 7; // k ∈ 2..=8
            let cost: Vec<Vec<f64>> =
                (0..k).map(|_| (0..k).map(|_| rng.random::<f64>()).collect()).collect();
            let (assignment, total) = hungarian(&cost);
            // bijection
            let mut seen = vec![false; k];
            for &j in &assignment {
                assert!(!seen[j]);
                seen[j] = true;
            }
            // reported cost is consistent and minimal
            let recomputed: f64 = (0..k).map(|i| cost[i][assignment[i]]).sum();
            assert_abs_diff_eq!(total, recomputed, epsilon = 1e-12);
            assert_abs_diff_eq!(total, brute_force_min(&cost), epsilon = 1e-12);
        }
    }

    #[test]
    fn matching_inverts_a_column_swap() {
        let truth = sample_model(3, 15, 1.0, 0.2, 7).unwrap();
        let swapped = truth.permute_topics(&[2, 0, 1]).unwrap();
        let m = match_topics(&truth, &swapped).unwrap();
        // new topic t of `swapped` is old topic [2,0,1][t]; truth topic i
        // therefore matches the position where it ended up
        assert_eq!(m.permutation, vec![1, 2, 0]);
        assert!(m.cost <= 1e-12);
    }

    #[test]
    fn matching_survives_small_noise() {
        let truth = sample_model(3, 20, 1.0, 0.2, 8).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut topics = truth.topics().clone();
        for j in 0..3 {
            let mut col = topics.column(j).into_owned();
            for x in col.iter_mut() {
                *x = (*x + 0.01 * (rng.random::<f64>() - 0.5)).max(0.0);
            }
            col /= col.sum();
            topics.set_column(j, &col);
        }
        let noisy = SldaModel::new(
            truth.alpha().to_vec(),
            topics,
            truth.eta().to_vec(),
            truth.sigma(),
        )
        .unwrap();
        let m = match_topics(&truth, &noisy).unwrap();
        assert_eq!(m.permutation, vec![0, 1, 2]);
        // per entry noise ≤ a = 0.005 ⇒ per column L1 ≤ 2·V·a/(1−V·a)
        assert!(m.cost <= 3.0 * 2.0 * 20.0 * 0.005 / (1.0 - 20.0 * 0.005), "cost {}", m.cost);
        // equals the exhaustive 3! minimum
        let cost: Vec<Vec<f64>> = (0..3)
            .map(|i| {
                (0..3)
                    .map(|j| {
                        (truth.topics().column(i) - noisy.topics().column(j))
                            .iter()
                            .map(|x| x.abs())
                            .sum()
                    })
                    .collect()
            })
            .collect();
        assert_abs_diff_eq!(m.cost, brute_force_min(&cost), epsilon = 1e-12);
    }

    #[test]
    fn matching_requires_same_shape() {
        let a = sample_model(2, 10, 1.0, 0.1, 1).unwrap();
        let b = sample_model(3, 10, 1.0, 0.1, 1).unwrap();
        assert!(match_topics(&a, &b).is_err());
    }

    fn tiny_model() -> SldaModel {
        let topics = DMatrix::from_column_slice(3, 2, &[0.6, 0.3, 0.1, 0.1, 0.2, 0.7]);
        SldaModel::new(vec![0.7, 0.9], topics, vec![1.0, -1.0], 0.0).unwrap()
    }

    #[test]
    fn gibbs_matches_exact_enumeration() {
        let model = tiny_model();
        let doc = Document { counts: vec![(0, 2), (2, 1)], response: 0.0 };
        let exact = infer_mixture_exact(&doc, &model).unwrap();

        // independent chains give a CLT-grade standard error for the mean
        let chains = 20;
        let mut means = Vec::with_capacity(chains);
        for c in 0..chains {
            let cfg = GibbsConfig { burnin: 200, samples: 200, seed: 1000 + c as u64 };
            let (h, warnings) = infer_mixture_gibbs(&doc, &model, &cfg).unwrap();
            assert!(warnings.is_empty());
            means.push(h[0]);
        }
        let mean = means.iter().sum::<f64>() / chains as f64;
        let var = means.iter().map(|m| (m - mean) * (m - mean)).sum::<f64>()
            / (chains as f64 - 1.0);
        let se = (var / chains as f64).sqrt();
        assert!(
            (mean - exact[0]).abs() <= 3.0 * se + 1e-4,
            "gibbs {mean} vs exact {} (se {se})",
            exact[0]
        );
    }

    #[test]
    fn single_topic_mixture_is_degenerate() {
        let topics = DMatrix::from_column_slice(3, 1, &[0.5, 0.3, 0.2]);
        let model = SldaModel::new(vec![1.0], topics, vec![0.3], 0.1).unwrap();
        let doc = Document { counts: vec![(0, 1), (1, 1), (2, 1)], response: 0.0 };
        let (h, _) = infer_mixture_gibbs(&doc, &model, &GibbsConfig::default()).unwrap();
        assert_abs_diff_eq!(h[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(infer_mixture_exact(&doc, &model).unwrap()[0], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn posterior_concentrates_on_disjoint_supports() {
        let topics = DMatrix::from_column_slice(4, 2, &[0.5, 0.5, 0.0, 0.0, 0.0, 0.0, 0.5, 0.5]);
        let model = SldaModel::new(vec![0.01, 0.01], topics, vec![0.0, 0.0], 0.0).unwrap();
        let doc = Document { counts: vec![(0, 2), (1, 1)], response: 0.0 };
        let (h, _) = infer_mixture_gibbs(&doc, &model, &GibbsConfig::default()).unwrap();
        assert!(h[0] >= 0.99, "h = {h:?}");
        assert!(infer_mixture_exact(&doc, &model).unwrap()[0] >= 0.99);
    }

    #[test]
    fn gibbs_output_is_on_the_simplex_and_deterministic() {
        let model = sample_model(4, 12, 2.0, 0.3, 17).unwrap();
        let corpus = generate_corpus(&model, 20, 9, 18).unwrap();
        for (d, doc) in corpus.documents().iter().enumerate() {
            let cfg = GibbsConfig { burnin: 30, samples: 50, seed: d as u64 };
            let (h, _) = infer_mixture_gibbs(doc, &model, &cfg).unwrap();
            assert!(h.iter().all(|&x| x >= 0.0));
            assert_abs_diff_eq!(h.sum(), 1.0, epsilon = 1e-12);
            let (h2, _) = infer_mixture_gibbs(doc, &model, &cfg).unwrap();
            assert_eq!(h, h2);
        }
    }

    #[test]
    fn zero_probability_words_are_smoothed_with_warning() {
        // word 2 has zero mass in every topic
        let topics = DMatrix::from_column_slice(3, 2, &[0.6, 0.4, 0.0, 0.2, 0.8, 0.0]);
        let model = SldaModel::new(vec![0.5, 0.5], topics, vec![0.0, 0.0], 0.0).unwrap();
        let doc = Document { counts: vec![(0, 1), (1, 1), (2, 1)], response: 0.0 };
        let (h, warnings) = infer_mixture_gibbs(&doc, &model, &GibbsConfig::default()).unwrap();
        assert_eq!(warnings.len(), 1);
        assert!(warnings[0].contains("word 2"));
        assert_abs_diff_eq!(h.sum(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn prediction_metrics_cover_the_edge_cases() {
        // perfect predictor
        let (mse, pr2, _) = prediction_metrics(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]);
        assert_eq!(mse, 0.0);
        assert_abs_diff_eq!(pr2.unwrap(), 1.0, epsilon = 1e-15);
        // constant predictor at the mean
        let (_, pr2, _) = prediction_metrics(&[1.0, 2.0, 3.0], &[2.0, 2.0, 2.0]);
        assert_abs_diff_eq!(pr2.unwrap(), 0.0, epsilon = 1e-15);
        // zero-variance responses
        let (mse, pr2, warnings) = prediction_metrics(&[1.0, 1.0], &[0.0, 2.0]);
        assert_abs_diff_eq!(mse, 1.0, epsilon = 1e-15);
        assert!(pr2.is_none());
        assert_eq!(warnings.len(), 1);
        // shift invariance
        let y = [0.3, -1.2, 2.0, 0.7];
        let yh = [0.1, -0.9, 1.5, 1.0];
        let shifted_y: Vec<f64> = y.iter().map(|v| v + 5.0).collect();
        let shifted_yh: Vec<f64> = yh.iter().map(|v| v + 5.0).collect();
        let (_, a, _) = prediction_metrics(&y, &yh);
        let (_, b, _) = prediction_metrics(&shifted_y, &shifted_yh);
        assert_abs_diff_eq!(a.unwrap(), b.unwrap(), epsilon = 1e-12);
    }

    #[test]
    fn self_evaluation_scores_well() {
        let model = sample_model(2, 15, 1.0, 0.0, 41).unwrap();
        let corpus = generate_corpus(&model, 60, 25, 42).unwrap();
        let report = evaluate(Some(&model), &model, &corpus, &GibbsConfig::default()).unwrap();
        let p = report.params.as_ref().unwrap();
        assert!(p.l1_mu <= 1e-12);
        assert!(p.l1_alpha <= 1e-12);
        assert!(p.l1_eta <= 1e-12);
        assert_eq!(p.sigma_abs_err, 0.0);
        assert!(report.pr2.unwrap() > 0.5, "pr2 = {:?}", report.pr2);
        assert!(report.neg_perword_ll.is_finite());
        assert!(report.neg_perword_ll > 0.0);
        assert_eq!(report.num_test_docs, 60);

        // evaluation is deterministic
        let again = evaluate(Some(&model), &model, &corpus, &GibbsConfig::default()).unwrap();
        assert_eq!(report.mse, again.mse);
        assert_eq!(report.neg_perword_ll, again.neg_perword_ll);
    }

    #[test]
    fn evaluation_without_truth_omits_parameter_errors() {
        let model = sample_model(2, 10, 1.0, 0.2, 51).unwrap();
        let corpus = generate_corpus(&model, 10, 6, 52).unwrap();
        let cfg = GibbsConfig { burnin: 20, samples: 20, seed: 0 };
        let report = evaluate(None, &model, &corpus, &cfg).unwrap();
        assert!(report.params.is_none());
        let row = report.to_csv_row();
        assert_eq!(row.split(',').count(), EvalReport::csv_header().split(',').count());
        assert!(row.ends_with(",,,"));
        assert!(report.to_text().contains("mse"));
    }

    #[test]
    fn evaluation_checks_vocabulary_compatibility() {
        let model = sample_model(2, 10, 1.0, 0.2, 61).unwrap();
        let other = sample_model(2, 11, 1.0, 0.2, 61).unwrap();
        let corpus = generate_corpus(&model, 5, 5, 62).unwrap();
        assert!(evaluate(None, &other, &corpus, &GibbsConfig::default()).is_err());
        assert!(evaluate(Some(&other), &model, &corpus, &GibbsConfig::default()).is_err());
    }

    #[test]
    fn exact_inference_guards_against_blowup() {
        let model = sample_model(4, 10, 1.0, 0.2, 71).unwrap();
        let doc = Document { counts: vec![(0, 40)], response: 0.0 };
        assert!(infer_mixture_exact(&doc, &model).is_err());
    }
}
