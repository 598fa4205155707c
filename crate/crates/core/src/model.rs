//! sLDA parameter types, the synthetic generative process, Dirichlet moment
//! formulas, and analytic population-moment oracles.
//!
//! The generative model: per document, a topic mixture `h ~ Dirichlet(α)`;
//! each of `m` word positions draws a topic `z_j ~ Multi(h)` and a word
//! `w_j ~ Multi(μ_{z_j})`; the response is `y = ηᵀh + ε`, `ε ~ N(0, σ²)`.

use nalgebra::{DMatrix, DVector};
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Gamma, StandardNormal};
use rayon::prelude::*;

use crate::corpus::{Corpus, Document};
use crate::error::{Error, Result};
use crate::seeding::{derive, Domain};
use crate::tensor::SymTensor3;

/// Ground-truth or recovered sLDA parameters.
///
/// Invariants (enforced by [`SldaModel::new`]): every topic column is a
/// probability distribution (nonnegative, sums to 1 within 1e-9), all
/// `alpha` entries are positive, `sigma ≥ 0`, and `1 ≤ k ≤ V`.
#[derive(Debug, Clone, PartialEq)]
pub struct SldaModel {
    alpha: Vec<f64>,
    topics: DMatrix<f64>,
    eta: Vec<f64>,
    sigma: f64,
}

impl SldaModel {
    pub fn new(
        alpha: Vec<f64>,
        topics: DMatrix<f64>,
        eta: Vec<f64>,
        sigma: f64,
    ) -> Result<Self> {
        let k = alpha.len();
        if k == 0 {
            return Err(Error::InvalidModel("model must have at least one topic".into()));
        }
        if topics.ncols() != k || eta.len() != k {
            return Err(Error::InvalidModel(format!(
                "inconsistent topic count: alpha has {k}, topics has {}, eta has {}",
                topics.ncols(),
                eta.len()
            )));
        }
        let v = topics.nrows();
        if v < k {
            return Err(Error::InvalidModel(format!(
                "vocabulary size {v} is smaller than topic count {k}"
            )));
        }
        if alpha.iter().any(|&a| !a.is_finite() || a <= 0.0) {
            return Err(Error::InvalidModel("alpha entries must be positive and finite".into()));
        }
        if !sigma.is_finite() || sigma < 0.0 {
            return Err(Error::InvalidModel("sigma must be nonnegative and finite".into()));
        }
        if eta.iter().any(|e| !e.is_finite()) {
            return Err(Error::InvalidModel("eta entries must be finite".into()));
        }
        for t in 0..k {
            let col = topics.column(t);
            if col.iter().any(|&p| !p.is_finite() || p < 0.0) {
                return Err(Error::InvalidModel(format!(
                    "topic column {t} has a negative or non-finite entry"
                )));
            }
            let sum: f64 = col.iter().sum();
            if (sum - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidModel(format!(
                    "topic column {t} sums to {sum}, not 1 within 1e-9"
                )));
            }
        }
        Ok(SldaModel { alpha, topics, eta, sigma })
    }

    pub fn k(&self) -> usize {
        self.alpha.len()
    }

    pub fn vocab_size(&self) -> usize {
        self.topics.nrows()
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn alpha0(&self) -> f64 {
        self.alpha.iter().sum()
    }

    /// Topic-word matrix `O`, `V×k`; column `t` is the distribution `μ_t`.
    pub fn topics(&self) -> &DMatrix<f64> {
        &self.topics
    }

    pub fn eta(&self) -> &[f64] {
        &self.eta
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// Stack the word block (scaled by `scale`) over the regression weights.
    pub fn joint_topic_matrix(&self, scale: f64) -> Result<JointTopicMatrix> {
        if !scale.is_finite() || scale <= 0.0 {
            return Err(Error::InvalidConfig(format!("scale must be positive, got {scale}")));
        }
        let (v, k) = (self.vocab_size(), self.k());
        let mut vstar = DMatrix::zeros(v + 1, k);
        for t in 0..k {
            for w in 0..v {
                vstar[(w, t)] = scale * self.topics[(w, t)];
            }
            vstar[(v, t)] = self.eta[t];
        }
        Ok(JointTopicMatrix { vstar, scale })
    }

    /// Reorder topics so new topic `t` is old topic `perm[t]`.
    pub fn permute_topics(&self, perm: &[usize]) -> Result<SldaModel> {
        let k = self.k();
        let mut seen = vec![false; k];
        if perm.len() != k || perm.iter().any(|&p| p >= k || std::mem::replace(&mut seen[p], true))
        {
            return Err(Error::InvalidConfig(format!(
                "permutation {perm:?} is not a bijection on 0..{k}"
            )));
        }
        let alpha = perm.iter().map(|&p| self.alpha[p]).collect();
        let eta = perm.iter().map(|&p| self.eta[p]).collect();
        let mut topics = DMatrix::zeros(self.vocab_size(), k);
        for (t, &p) in perm.iter().enumerate() {
            topics.set_column(t, &self.topics.column(p));
        }
        SldaModel::new(alpha, topics, eta, self.sigma)
    }
}

/// Joint word/response factor matrix: column `i` is `v_i = [C·μ_i; η_i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct JointTopicMatrix {
    /// `(V+1)×k`; rows `0..V` carry `scale·μ_i`, row `V` carries `η`.
    pub vstar: DMatrix<f64>,
    pub scale: f64,
}

/// Draw a random model: uniform(0,1) topic entries with normalized columns
/// (redrawn until the smallest singular value of `O` exceeds 1e-3, so the
/// columns are usably independent), standard-normal `eta`, homogeneous
/// `alpha = alpha0/k`.
pub fn sample_model(
    num_topics: usize,
    vocab_size: usize,
    alpha0: f64,
    sigma: f64,
    seed: u64,
) -> Result<SldaModel> {
    if num_topics == 0 {
        return Err(Error::InvalidConfig("need at least one topic".into()));
    }
    if vocab_size < num_topics {
        return Err(Error::InvalidConfig(format!(
            "vocabulary size {vocab_size} must be at least the topic count {num_topics}"
        )));
    }
    if !alpha0.is_finite() || alpha0 <= 0.0 {
        return Err(Error::InvalidConfig(format!("alpha0 must be positive, got {alpha0}")));
    }
    if !sigma.is_finite() || sigma < 0.0 {
        return Err(Error::InvalidConfig(format!("sigma must be nonnegative, got {sigma}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(derive(seed, Domain::ModelSample, 0));
    const MAX_TRIES: usize = 200;
    const MIN_SINGULAR_VALUE: f64 = 1e-3;
    let mut topics = None;
    for _ in 0..MAX_TRIES {
        let mut candidate =
            DMatrix::from_fn(vocab_size, num_topics, |_, _| rng.random::<f64>());
        for t in 0..num_topics {
            let sum: f64 = candidate.column(t).iter().sum();
            if sum <= 0.0 {
                continue;
            }
            let mut col = candidate.column_mut(t);
            col /= sum;
        }
        let sigma_min = candidate
            .clone()
            .svd(false, false)
            .singular_values
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min);
        if sigma_min >= MIN_SINGULAR_VALUE {
            topics = Some(candidate);
            break;
        }
    }
    let topics = topics.ok_or_else(|| {
        Error::InvalidConfig(format!(
            "failed to sample a topic matrix with smallest singular value ≥ {MIN_SINGULAR_VALUE} \
             in {MAX_TRIES} tries (V={vocab_size}, k={num_topics})"
        ))
    })?;
    let eta: Vec<f64> = (0..num_topics).map(|_| rng.sample(StandardNormal)).collect();
    let alpha = vec![alpha0 / num_topics as f64; num_topics];
    SldaModel::new(alpha, topics, eta, sigma)
}

/// Dirichlet draw via normalized Gamma variates (exact for k = 1).
fn sample_mixture(alpha: &[f64], rng: &mut ChaCha8Rng) -> Vec<f64> {
    if alpha.len() == 1 {
        return vec![1.0];
    }
    let gammas: Vec<f64> = alpha
        .iter()
        .map(|&a| Gamma::new(a, 1.0).expect("positive shape").sample(rng))
        .collect();
    let total: f64 = gammas.iter().sum();
    if total > 0.0 && total.is_finite() {
        gammas.into_iter().map(|g| g / total).collect()
    } else {
        vec![1.0 / alpha.len() as f64; alpha.len()]
    }
}

/// Sample `num_docs` documents of exactly `doc_len` tokens each.
///
/// Deterministic given `seed`, independent of thread count: each document
/// uses its own generator derived from `(seed, doc index)`.
pub fn generate_corpus(
    model: &SldaModel,
    num_docs: usize,
    doc_len: usize,
    seed: u64,
) -> Result<Corpus> {
    if num_docs == 0 {
        return Err(Error::InvalidConfig("need at least one document".into()));
    }
    if doc_len < 3 {
        return Err(Error::InvalidConfig(format!(
            "documents need at least 3 words, requested doc_len = {doc_len}"
        )));
    }
    let k = model.k();
    let word_samplers: Vec<rand::distr::weighted::WeightedIndex<f64>> = (0..k)
        .map(|t| {
            rand::distr::weighted::WeightedIndex::new(model.topics().column(t).iter().cloned())
                .map_err(|e| Error::InvalidModel(format!("topic column {t} not sampleable: {e}")))
        })
        .collect::<Result<_>>()?;

    let documents: Vec<Document> = (0..num_docs)
        .into_par_iter()
        .map(|d| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive(seed, Domain::GenerateDoc, d as u64));
            let h = sample_mixture(model.alpha(), &mut rng);
            let eps: f64 = rng.sample(StandardNormal);
            let response =
                model.eta().iter().zip(&h).map(|(e, p)| e * p).sum::<f64>() + model.sigma() * eps;
            let topic_sampler = rand::distr::weighted::WeightedIndex::new(h.iter().cloned())
                .expect("mixture weights sum to 1");
            let mut counts = std::collections::BTreeMap::new();
            for _ in 0..doc_len {
                let z = if k == 1 { 0 } else { topic_sampler.sample(&mut rng) };
                let w = word_samplers[z].sample(&mut rng) as u32;
                *counts.entry(w).or_insert(0u32) += 1;
            }
            Document { counts: counts.into_iter().collect(), response }
        })
        .collect();
    Corpus::new(documents, model.vocab_size())
}

/// Closed-form first three moments of `h ~ Dirichlet(α)`.
#[derive(Debug, Clone)]
pub struct DirichletMoments {
    /// `E[h]`, entries `α_i/α₀`.
    pub mean: DVector<f64>,
    /// `E[h⊗h]`, entries `α_i(α_j + δ_ij)/(α₀(α₀+1))`.
    pub second: DMatrix<f64>,
    /// `E[h⊗h⊗h]`; repeated indices gain `+1`/`+2` shifts.
    pub third: SymTensor3,
}

pub fn dirichlet_moments(alpha: &[f64]) -> Result<DirichletMoments> {
    if alpha.is_empty() || alpha.iter().any(|&a| !a.is_finite() || a <= 0.0) {
        return Err(Error::InvalidConfig(
            "Dirichlet parameters must be positive and finite".into(),
        ));
    }
    let k = alpha.len();
    let a0: f64 = alpha.iter().sum();
    let d2 = a0 * (a0 + 1.0);
    let d3 = a0 * (a0 + 1.0) * (a0 + 2.0);

    let mean = DVector::from_iterator(k, alpha.iter().map(|&a| a / a0));
    let second = DMatrix::from_fn(k, k, |i, j| {
        let shift = if i == j { 1.0 } else { 0.0 };
        alpha[i] * (alpha[j] + shift) / d2
    });

    let mut third = SymTensor3::zeros(k);
    for i in 0..k {
        for j in i..k {
            for l in j..k {
                // Multiplicity pattern of the sorted triple (i ≤ j ≤ l).
                let value = if i == j && j == l {
                    alpha[i] * (alpha[i] + 1.0) * (alpha[i] + 2.0) / d3
                } else if i == j {
                    alpha[i] * (alpha[i] + 1.0) * alpha[l] / d3
                } else if j == l {
                    alpha[j] * (alpha[j] + 1.0) * alpha[i] / d3
                } else {
                    alpha[i] * alpha[j] * alpha[l] / d3
                };
                for (a, b, c) in
                    [(i, j, l), (i, l, j), (j, i, l), (j, l, i), (l, i, j), (l, j, i)]
                {
                    third.set(a, b, c, value);
                }
            }
        }
    }
    Ok(DirichletMoments { mean, second, third })
}

/// Exact population word moments of a model (infinite-data limit).
#[derive(Debug, Clone)]
pub struct ExactMoments {
    /// `E[x₁] = O·E[h]`, length V.
    pub m1: DVector<f64>,
    /// `M₂ = Σ_i α_i μ_i⊗μ_i / (α₀(α₀+1))`, V×V.
    pub m2: DMatrix<f64>,
    /// `M₃ = Σ_i 2α_i μ_i^⊗3 / (α₀(α₀+1)(α₀+2))`, V×V×V.
    pub m3: SymTensor3,
    /// `M_y = Σ_i 2α_i η_i μ_i⊗μ_i / (α₀(α₀+1)(α₀+2))`, V×V.
    pub my: DMatrix<f64>,
    /// `E[y] = ηᵀα/α₀`.
    pub mean_y: f64,
    /// `E[y²] = ηᵀE[h⊗h]η + σ²`.
    pub mean_y2: f64,
}

pub fn population_moments(model: &SldaModel) -> ExactMoments {
    let (v, k) = (model.vocab_size(), model.k());
    let a0 = model.alpha0();
    let c2 = 1.0 / (a0 * (a0 + 1.0));
    let c3 = 2.0 / (a0 * (a0 + 1.0) * (a0 + 2.0));

    let mut m1 = DVector::zeros(v);
    let mut m2 = DMatrix::zeros(v, v);
    let mut my = DMatrix::zeros(v, v);
    let mut m3 = SymTensor3::zeros(v);
    for t in 0..k {
        let mu: DVector<f64> = model.topics().column(t).into();
        let a = model.alpha()[t];
        m1 += (a / a0) * &mu;
        let outer = &mu * mu.transpose();
        m2 += c2 * a * &outer;
        my += c3 * a * model.eta()[t] * &outer;
        m3.add_scaled_cube(c3 * a, &mu);
    }

    let dm = dirichlet_moments(model.alpha()).expect("model alpha is valid");
    let eta = DVector::from_column_slice(model.eta());
    let mean_y = eta.dot(&dm.mean);
    let mean_y2 = (eta.transpose() * &dm.second * &eta)[(0, 0)] + model.sigma().powi(2);
    ExactMoments { m1, m2, m3, my, mean_y, mean_y2 }
}

/// Exact population moments of the stacked vector `z = [C·x; y]`.
#[derive(Debug, Clone)]
pub struct ExactJointMoments {
    /// `E[z₁] = V*·E[h]`, length V+1.
    pub n1: DVector<f64>,
    /// `N₂ = Σ_i α_i v_i⊗v_i / (α₀(α₀+1))`, (V+1)×(V+1).
    pub n2: DMatrix<f64>,
    /// `N₃ = Σ_i 2α_i v_i^⊗3 / (α₀(α₀+1)(α₀+2))`.
    pub n3: SymTensor3,
    /// Word-block scaling constant C baked into `v_i`.
    pub scale: f64,
    /// The model's response noise (assumed known to the joint pipeline).
    pub sigma: f64,
    pub mean_y: f64,
    pub mean_y2: f64,
}

pub fn population_joint_moments(model: &SldaModel, scale: f64) -> Result<ExactJointMoments> {
    let joint = model.joint_topic_matrix(scale)?;
    let d = model.vocab_size() + 1;
    let k = model.k();
    let a0 = model.alpha0();
    let c2 = 1.0 / (a0 * (a0 + 1.0));
    let c3 = 2.0 / (a0 * (a0 + 1.0) * (a0 + 2.0));

    let mut n1 = DVector::zeros(d);
    let mut n2 = DMatrix::zeros(d, d);
    let mut n3 = SymTensor3::zeros(d);
    for t in 0..k {
        let vi: DVector<f64> = joint.vstar.column(t).into();
        let a = model.alpha()[t];
        n1 += (a / a0) * &vi;
        n2 += c2 * a * (&vi * vi.transpose());
        n3.add_scaled_cube(c3 * a, &vi);
    }

    let word = population_moments(model);
    Ok(ExactJointMoments {
        n1,
        n2,
        n3,
        scale,
        sigma: model.sigma(),
        mean_y: word.mean_y,
        mean_y2: word.mean_y2,
    })
}
