//! End-to-end parameter recovery pipelines.
//!
//! Two routes from a corpus to an [`SldaModel`]:
//!
//! * **two-stage** — whiten the word pair moment, run the tensor power
//!   method on the whitened word triple moment, read topics and the prior
//!   from the eigenpairs, then recover the regression weights by a
//!   quadratic form against the response-weighted pair moment and the
//!   noise level from response variance accounting;
//! * **joint** — stack `[C·x; y]`, whiten/decompose its moments once, and
//!   read topics and weights from the same eigenvectors. The noise level σ
//!   is an *input* here (it is subtracted inside the moments), not an
//!   output.
//!
//! Both pipelines also accept exact population moments in place of
//! empirical ones, which turns them into closed-form inversions useful for
//! validation.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::model::{dirichlet_moments, ExactJointMoments, ExactMoments, SldaModel};
use crate::moments::{
    estimate_joint_moments, estimate_moments, whitened_m3, whitened_n3, MomentWork,
    WhitenedTensor,
};
use crate::spectral::{
    robust_tpm, whiten_exact, whiten_randomized, whitening_residual, TpmConfig, WhiteningMatrix,
};

/// Which pipeline a configuration drives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    TwoStage,
    Joint,
}

/// How the second moment is whitened.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum WhiteningKind {
    /// Truncated symmetric eigendecomposition of the full moment matrix.
    Exact,
    /// Gaussian-sketch whitening with sketch width `oversample·k`.
    Randomized { oversample: usize },
}

/// Everything a recovery run needs besides the corpus.
#[derive(Debug, Clone, Serialize)]
pub struct RecoveryConfig {
    pub method: Method,
    /// Dirichlet concentration α₀ (assumed known).
    pub alpha0: f64,
    pub num_topics: usize,
    /// Power-method restarts per deflation round (L).
    pub restarts: usize,
    /// Power-method sweeps per restart (T).
    pub iters: usize,
    /// Response noise subtracted inside the joint moments; ignored by the
    /// two-stage pipeline (which estimates σ instead).
    pub sigma_assumed: f64,
    /// Word-coordinate scaling constant of the joint stacking; ignored by
    /// the two-stage pipeline.
    pub scale: f64,
    pub whitening: WhiteningKind,
    /// Relative rank tolerance: the k-th retained singular value must
    /// exceed this fraction of the largest.
    pub rank_tol_rel: f64,
    pub seed: u64,
}

impl RecoveryConfig {
    /// A configuration with the default knobs: L = T = 100, scale 100,
    /// σ assumed 0, exact whitening, relative rank tolerance 1e-10.
    pub fn new(method: Method, alpha0: f64, num_topics: usize) -> Self {
        RecoveryConfig {
            method,
            alpha0,
            num_topics,
            restarts: 100,
            iters: 100,
            sigma_assumed: 0.0,
            scale: 100.0,
            whitening: WhiteningKind::Exact,
            rank_tol_rel: 1e-10,
            seed: 0,
        }
    }

    fn validate(&self, invoked: Method) -> Result<()> {
        if self.method != invoked {
            return Err(Error::InvalidConfig(format!(
                "configuration selects {:?} but the {:?} pipeline was invoked",
                self.method, invoked
            )));
        }
        if !self.alpha0.is_finite() || self.alpha0 <= 0.0 {
            return Err(Error::InvalidConfig(format!(
                "alpha0 must be positive, got {}",
                self.alpha0
            )));
        }
        if self.num_topics == 0 {
            return Err(Error::InvalidConfig("need at least one topic".into()));
        }
        if self.restarts < self.num_topics {
            return Err(Error::InvalidConfig(format!(
                "restarts (L = {}) must be at least the topic count k = {}",
                self.restarts, self.num_topics
            )));
        }
        if self.iters == 0 {
            return Err(Error::InvalidConfig("iteration count (T) must be positive".into()));
        }
        if !self.sigma_assumed.is_finite() || self.sigma_assumed < 0.0 {
            return Err(Error::InvalidConfig(format!(
                "assumed noise level must be nonnegative, got {}",
                self.sigma_assumed
            )));
        }
        if !self.scale.is_finite() || self.scale <= 0.0 {
            return Err(Error::InvalidConfig(format!(
                "scale must be positive, got {}",
                self.scale
            )));
        }
        if !self.rank_tol_rel.is_finite() || self.rank_tol_rel < 0.0 {
            return Err(Error::InvalidConfig(format!(
                "rank tolerance must be nonnegative, got {}",
                self.rank_tol_rel
            )));
        }
        if let WhiteningKind::Randomized { oversample } = self.whitening {
            if oversample == 0 {
                return Err(Error::InvalidConfig("oversample factor must be at least 1".into()));
            }
        }
        Ok(())
    }
}

/// Numeric evidence recorded alongside a recovered model.
#[derive(Debug, Clone, Serialize)]
pub struct Diagnostics {
    /// Tensor eigenvalues, in the recovered topic order (descending).
    pub lambdas: Vec<f64>,
    /// Probe estimate of the deflated tensor remainder.
    pub tpm_residual: f64,
    /// `‖Wᵀ M̂₂ W − I‖_F` of the whitening actually used.
    pub whitening_residual: f64,
    /// Smallest retained singular value of the second moment.
    pub sigma_k: f64,
    /// Largest L1 mass clamped from any recovered topic column.
    pub max_clamped_mass: f64,
    /// `Ê[y]` seen in the data (or exact moments).
    pub mean_y_observed: f64,
    /// `Σ_i η̂_i E[h_i]` implied by the recovered parameters.
    pub mean_y_implied: f64,
    /// For joint runs only: the σ the two-stage variance accounting would
    /// report for the recovered (α̂, η̂) — a cross-check, not the model σ.
    pub sigma_joint_reference: Option<f64>,
    pub warnings: Vec<String>,
    /// Work counters of the streaming whitened-tensor builder (absent for
    /// exact-moment runs).
    pub moment_work: Option<MomentWork>,
}

/// A recovered model plus the configuration and diagnostics of the run.
#[derive(Debug, Clone)]
pub struct RecoveredModel {
    pub model: SldaModel,
    pub config: RecoveryConfig,
    pub diagnostics: Diagnostics,
}

/// The two-stage σ estimate: response variance not explained by the
/// recovered topic/weight structure.
#[derive(Debug, Clone)]
pub struct SigmaEstimate {
    pub sigma: f64,
    /// `Σ_i η̂_i α̂_i / α̂₀`, to cross-check against the observed `Ê[y]`.
    pub implied_mean_y: f64,
    pub warnings: Vec<String>,
}

/// Recover σ from `σ² = E[y²] − η̂ᵀ E[h⊗h] η̂`, evaluating the Dirichlet
/// second moment at the recovered prior. A negative estimate (possible
/// under sampling noise) is clamped to zero; beyond a small tolerance the
/// clamp is reported as a moment mismatch warning.
pub fn recover_sigma(
    mean_y: f64,
    mean_y2: f64,
    alpha_hat: &[f64],
    eta_hat: &[f64],
) -> Result<SigmaEstimate> {
    if alpha_hat.len() != eta_hat.len() {
        return Err(Error::DimensionMismatch(format!(
            "alpha has {} entries but eta has {}",
            alpha_hat.len(),
            eta_hat.len()
        )));
    }
    let dm = dirichlet_moments(alpha_hat)?;
    let eta = DVector::from_column_slice(eta_hat);
    let explained = (eta.transpose() * &dm.second * &eta)[(0, 0)];
    let var = mean_y2 - explained;
    let implied_mean_y = eta.dot(&dm.mean);
    let mut warnings = Vec::new();
    if var < -1e-12 {
        warnings.push(format!(
            "moment mismatch: implied noise variance {var:.3e} is negative; clamped to 0 \
             (observed E[y] = {mean_y:.6}, implied {implied_mean_y:.6})"
        ));
    }
    Ok(SigmaEstimate { sigma: var.max(0.0).sqrt(), implied_mean_y, warnings })
}

fn whiten_by_config(m2: &DMatrix<f64>, cfg: &RecoveryConfig) -> Result<WhiteningMatrix> {
    match cfg.whitening {
        WhiteningKind::Exact => whiten_exact(m2, cfg.num_topics, cfg.rank_tol_rel),
        WhiteningKind::Randomized { oversample } => {
            whiten_randomized(m2, cfg.num_topics, oversample, cfg.rank_tol_rel, cfg.seed)
        }
    }
}

fn alpha_from_lambda(alpha0: f64, lambda: f64) -> f64 {
    4.0 * alpha0 * (alpha0 + 1.0) / ((alpha0 + 2.0).powi(2) * lambda * lambda)
}

/// Clamp negative entries to zero and renormalize to a probability column;
/// returns the L1 mass removed by clamping.
fn clamp_to_simplex(v: &mut DVector<f64>, topic: usize) -> Result<f64> {
    let mut clamped = 0.0;
    for x in v.iter_mut() {
        if *x < 0.0 {
            clamped -= *x;
            *x = 0.0;
        }
    }
    let sum = v.sum();
    if !(sum > 0.0) {
        return Err(Error::InvalidModel(format!(
            "recovered topic {topic} has no positive mass (column sum {sum:.3e}); \
             the moment estimates do not support this k"
        )));
    }
    *v /= sum;
    Ok(clamped)
}

/// Algorithm-1 recovery from a corpus: empirical moments, whitening, tensor
/// power method, then η by power update and σ by variance accounting.
pub fn recover_two_stage(corpus: &Corpus, cfg: &RecoveryConfig) -> Result<RecoveredModel> {
    cfg.validate(Method::TwoStage)?;
    let ms = estimate_moments(corpus, cfg.alpha0)?;
    let wm = whiten_by_config(&ms.m2, cfg)?;
    let (tensor, work) = whitened_m3(corpus, cfg.alpha0, &wm.w, &ms.m1)?;
    finish_two_stage(&ms.m2, &ms.my, ms.mean_y, ms.mean_y2, tensor, wm, cfg, Some(work))
}

/// Algorithm-1 recovery with exact population moments substituted for the
/// empirical ones — a closed-form inversion used for validation.
pub fn recover_two_stage_from_moments(
    em: &ExactMoments,
    cfg: &RecoveryConfig,
) -> Result<RecoveredModel> {
    cfg.validate(Method::TwoStage)?;
    let wm = whiten_by_config(&em.m2, cfg)?;
    let mut t = em.m3.contract(&wm.w);
    t.symmetrize();
    finish_two_stage(&em.m2, &em.my, em.mean_y, em.mean_y2, WhitenedTensor { t }, wm, cfg, None)
}

#[allow(clippy::too_many_arguments)]
fn finish_two_stage(
    m2: &DMatrix<f64>,
    my: &DMatrix<f64>,
    mean_y: f64,
    mean_y2: f64,
    tensor: WhitenedTensor,
    wm: WhiteningMatrix,
    cfg: &RecoveryConfig,
    work: Option<MomentWork>,
) -> Result<RecoveredModel> {
    let k = cfg.num_topics;
    let a0 = cfg.alpha0;
    let dec = robust_tpm(
        &tensor,
        k,
        &TpmConfig { restarts: cfg.restarts, iters: cfg.iters, seed: cfg.seed },
    )?;
    let mut warnings = dec.warnings.clone();

    let half = (a0 + 2.0) / 2.0;
    let my_w = wm.w.tr_mul(&(my * &wm.w)); // Ŵᵀ M̂_y Ŵ, k×k

    let vocab = wm.w.nrows();
    let mut alpha = Vec::with_capacity(k);
    let mut eta = Vec::with_capacity(k);
    let mut lambdas = Vec::with_capacity(k);
    let mut topics = DMatrix::zeros(vocab, k);
    let mut max_clamped: f64 = 0.0;
    for (i, pair) in dec.pairs.iter().enumerate() {
        lambdas.push(pair.lambda);
        alpha.push(alpha_from_lambda(a0, pair.lambda));
        let mut mu = wm.w_pinv.tr_mul(&pair.omega) * (half * pair.lambda);
        max_clamped = max_clamped.max(clamp_to_simplex(&mut mu, i)?);
        topics.set_column(i, &mu);
        eta.push(half * pair.omega.dot(&(&my_w * &pair.omega)));
    }
    if max_clamped > 1e-8 {
        warnings.push(format!(
            "clamped up to {max_clamped:.3e} of negative L1 mass from recovered topic columns"
        ));
    }

    let sigma_est = recover_sigma(mean_y, mean_y2, &alpha, &eta)?;
    warnings.extend(sigma_est.warnings.iter().cloned());

    let model = SldaModel::new(alpha, topics, eta, sigma_est.sigma)?;
    Ok(RecoveredModel {
        model,
        config: cfg.clone(),
        diagnostics: Diagnostics {
            lambdas,
            tpm_residual: dec.residual_norm,
            whitening_residual: whitening_residual(&wm.w, m2),
            sigma_k: wm.sigma_k,
            max_clamped_mass: max_clamped,
            mean_y_observed: mean_y,
            mean_y_implied: sigma_est.implied_mean_y,
            sigma_joint_reference: None,
            warnings,
            moment_work: work,
        },
    })
}

/// Algorithm-2 recovery from a corpus: moments of the stacked `[C·x; y]`
/// vector (with `cfg.sigma_assumed` subtracted), one whitening + tensor
/// decomposition, topics and weights read off the same eigenvectors.
pub fn recover_joint(corpus: &Corpus, cfg: &RecoveryConfig) -> Result<RecoveredModel> {
    cfg.validate(Method::Joint)?;
    let js = estimate_joint_moments(corpus, cfg.alpha0, cfg.sigma_assumed, cfg.scale)?;
    let wm = whiten_by_config(&js.n2, cfg)?;
    let (tensor, work) =
        whitened_n3(corpus, cfg.alpha0, cfg.sigma_assumed, cfg.scale, &wm.w, &js.n1)?;
    let n = corpus.num_docs() as f64;
    let mean_y = corpus.responses().iter().sum::<f64>() / n;
    let mean_y2 = corpus.responses().iter().map(|y| y * y).sum::<f64>() / n;
    finish_joint(&js.n2, mean_y, mean_y2, tensor, wm, cfg, Some(work))
}

/// Algorithm-2 recovery with exact population joint moments; requires the
/// moments to have been built at the configured scale and assumed σ.
pub fn recover_joint_from_moments(
    em: &ExactJointMoments,
    cfg: &RecoveryConfig,
) -> Result<RecoveredModel> {
    cfg.validate(Method::Joint)?;
    if (em.scale - cfg.scale).abs() > 1e-12 * cfg.scale.abs() {
        return Err(Error::InvalidConfig(format!(
            "exact joint moments were built at scale {} but the configuration says {}",
            em.scale, cfg.scale
        )));
    }
    if (em.sigma - cfg.sigma_assumed).abs() > 1e-12 * (1.0 + cfg.sigma_assumed.abs()) {
        return Err(Error::InvalidConfig(format!(
            "exact joint moments carry σ = {} but the configuration assumes {}",
            em.sigma, cfg.sigma_assumed
        )));
    }
    let wm = whiten_by_config(&em.n2, cfg)?;
    let mut t = em.n3.contract(&wm.w);
    t.symmetrize();
    finish_joint(&em.n2, em.mean_y, em.mean_y2, WhitenedTensor { t }, wm, cfg, None)
}

fn finish_joint(
    n2: &DMatrix<f64>,
    mean_y: f64,
    mean_y2: f64,
    tensor: WhitenedTensor,
    wm: WhiteningMatrix,
    cfg: &RecoveryConfig,
    work: Option<MomentWork>,
) -> Result<RecoveredModel> {
    let k = cfg.num_topics;
    let a0 = cfg.alpha0;
    let dec = robust_tpm(
        &tensor,
        k,
        &TpmConfig { restarts: cfg.restarts, iters: cfg.iters, seed: cfg.seed },
    )?;
    let mut warnings = dec.warnings.clone();

    let half = (a0 + 2.0) / 2.0;
    let vocab = wm.w.nrows() - 1;
    let mut alpha = Vec::with_capacity(k);
    let mut eta = Vec::with_capacity(k);
    let mut lambdas = Vec::with_capacity(k);
    let mut topics = DMatrix::zeros(vocab, k);
    let mut max_clamped: f64 = 0.0;
    for (i, pair) in dec.pairs.iter().enumerate() {
        lambdas.push(pair.lambda);
        alpha.push(alpha_from_lambda(a0, pair.lambda));
        let joint_col = wm.w_pinv.tr_mul(&pair.omega) * (half * pair.lambda);
        let mut mu = joint_col.rows(0, vocab).into_owned() / cfg.scale;
        max_clamped = max_clamped.max(clamp_to_simplex(&mut mu, i)?);
        topics.set_column(i, &mu);
        eta.push(joint_col[vocab]);
    }
    if max_clamped > 1e-8 {
        warnings.push(format!(
            "clamped up to {max_clamped:.3e} of negative L1 mass from recovered topic columns"
        ));
    }

    // Not the model's σ (that is cfg.sigma_assumed by construction); the
    // variance-accounting estimate is reported for cross-checking only.
    let sigma_est = recover_sigma(mean_y, mean_y2, &alpha, &eta)?;
    warnings.extend(
        sigma_est.warnings.iter().map(|w| format!("σ cross-check: {w}")),
    );

    let model = SldaModel::new(alpha, topics, eta, cfg.sigma_assumed)?;
    Ok(RecoveredModel {
        model,
        config: cfg.clone(),
        diagnostics: Diagnostics {
            lambdas,
            tpm_residual: dec.residual_norm,
            whitening_residual: whitening_residual(&wm.w, n2),
            sigma_k: wm.sigma_k,
            max_clamped_mass: max_clamped,
            mean_y_observed: mean_y,
            mean_y_implied: sigma_est.implied_mean_y,
            sigma_joint_reference: Some(sigma_est.sigma),
            warnings,
            moment_work: work,
        },
    })
}
