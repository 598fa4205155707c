//! Whitening and the robust tensor power method.
//!
//! `whiten_exact` truncates a symmetric eigendecomposition of the second
//! moment; `whiten_randomized` is the sketch-based variant (Gaussian test
//! matrix, two small SVDs) that avoids a dense D×D factorization cost.
//! `robust_tpm` extracts eigenpairs of a whitened third-order tensor by
//! repeated-restart power iteration with immediate deflation.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::moments::WhitenedTensor;
use crate::seeding::{derive, derive2, Domain};
use crate::tensor::SymTensor3;

/// A whitening map for a symmetric positive semidefinite second moment:
/// `wᵀ M₂ w = I_k`.
#[derive(Debug, Clone)]
pub struct WhiteningMatrix {
    /// `W`, size D×k.
    pub w: DMatrix<f64>,
    /// Moore–Penrose pseudo-inverse `W⁺`, size k×D; `W⁺W = I_k`.
    pub w_pinv: DMatrix<f64>,
    /// Smallest retained singular value of the second moment
    /// (`= σ_min(W⁺)²`).
    pub sigma_k: f64,
}

/// One robust eigenpair of a whitened third-order tensor.
#[derive(Debug, Clone)]
pub struct EigenPair {
    pub lambda: f64,
    /// Unit vector in whitened k-space.
    pub omega: DVector<f64>,
}

/// All k robust eigenpairs, sorted by descending `lambda`.
#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    pub pairs: Vec<EigenPair>,
    /// Largest `|t(u,u,u)|` over random unit probes of the deflated
    /// remainder — an operator-norm estimate of what the k pairs missed.
    pub residual_norm: f64,
    /// Non-fatal issues (e.g. power iterations that did not converge).
    pub warnings: Vec<String>,
}

/// Configuration of the robust tensor power method.
#[derive(Debug, Clone, Copy)]
pub struct TpmConfig {
    /// Restarts per deflation round (L); must be ≥ the number of rounds.
    pub restarts: usize,
    /// Power-iteration sweeps per restart and per winner polish (T).
    pub iters: usize,
    pub seed: u64,
}

impl Default for TpmConfig {
    fn default() -> Self {
        TpmConfig { restarts: 100, iters: 100, seed: 0 }
    }
}

/// Step-size threshold below which the winner's final iterations count as
/// converged; larger last steps produce a warning.
const CONVERGENCE_TOL: f64 = 1e-6;
/// Number of random probes estimating the deflated remainder norm.
const RESIDUAL_PROBES: usize = 20;

fn require_symmetric(m2: &DMatrix<f64>) -> Result<()> {
    if m2.nrows() != m2.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "second-moment matrix must be square, got {}×{}",
            m2.nrows(),
            m2.ncols()
        )));
    }
    let scale = m2.iter().fold(0.0f64, |a, &x| a.max(x.abs()));
    let asym = (m2 - m2.transpose()).iter().fold(0.0f64, |a, &x| a.max(x.abs()));
    if asym > 1e-8 * (scale + 1e-300) {
        return Err(Error::InvalidConfig(format!(
            "second-moment matrix is not symmetric (max asymmetry {asym:.3e})"
        )));
    }
    Ok(())
}

fn check_k(k: usize, d: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::InvalidConfig("need at least one topic".into()));
    }
    if k > d {
        return Err(Error::InvalidConfig(format!(
            "requested k = {k} exceeds the moment dimension {d}"
        )));
    }
    Ok(())
}

/// Whiten via a truncated symmetric eigendecomposition: with the top-k
/// algebraically largest eigenpairs `(λ_i, u_i)`, `W = U_k Λ_k^{−1/2}` and
/// `W⁺ = Λ_k^{1/2} U_kᵀ`.
///
/// `rank_tol_rel` is relative: the k-th eigenvalue must exceed
/// `rank_tol_rel · λ_max`, otherwise the moment matrix cannot support k
/// topics and recovery must stop ([`Error::RankDeficient`]).
pub fn whiten_exact(m2: &DMatrix<f64>, k: usize, rank_tol_rel: f64) -> Result<WhiteningMatrix> {
    require_symmetric(m2)?;
    let d = m2.nrows();
    check_k(k, d)?;
    let eigen = m2.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eigen.eigenvalues[b].partial_cmp(&eigen.eigenvalues[a]).unwrap());

    let sigma_max = eigen.eigenvalues[order[0]];
    let sigma_k = eigen.eigenvalues[order[k - 1]];
    if sigma_max <= 0.0 || sigma_k <= rank_tol_rel * sigma_max {
        return Err(Error::RankDeficient { requested_k: k, sigma_k, sigma_max });
    }

    let mut w = DMatrix::zeros(d, k);
    let mut w_pinv = DMatrix::zeros(k, d);
    for (col, &idx) in order[..k].iter().enumerate() {
        let lambda = eigen.eigenvalues[idx];
        let u = eigen.eigenvectors.column(idx);
        let inv_sqrt = 1.0 / lambda.sqrt();
        let sqrt = lambda.sqrt();
        for row in 0..d {
            w[(row, col)] = u[row] * inv_sqrt;
            w_pinv[(col, row)] = u[row] * sqrt;
        }
    }
    Ok(WhiteningMatrix { w, w_pinv, sigma_k })
}

/// Whiten via a Gaussian sketch: `C = M₂S` and `Ω = SᵀM₂S` are factored by
/// SVD, truncated to k, and combined as
/// `W = U_C Σ_C^{−1} (D_Cᵀ D_Ω) Σ_Ω^{1/2}`. Exact when `M₂` has rank k;
/// avoids any D×D factorization. `W⁺` is the Moore–Penrose pseudo-inverse.
///
/// The sketch width is `k̃ = oversample·k` and must not exceed the moment
/// dimension.
pub fn whiten_randomized(
    m2: &DMatrix<f64>,
    k: usize,
    oversample: usize,
    rank_tol_rel: f64,
    seed: u64,
) -> Result<WhiteningMatrix> {
    require_symmetric(m2)?;
    let d = m2.nrows();
    check_k(k, d)?;
    if oversample == 0 {
        return Err(Error::InvalidConfig("oversample factor must be at least 1".into()));
    }
    let kt = oversample.checked_mul(k).filter(|&kt| kt <= d).ok_or_else(|| {
        Error::InvalidConfig(format!(
            "sketch width oversample·k = {oversample}·{k} exceeds the moment dimension {d}; \
             lower the oversample factor or use exact whitening"
        ))
    })?;

    let mut rng = ChaCha8Rng::seed_from_u64(derive(seed, Domain::WhitenSketch, 0));
    let mut s = DMatrix::zeros(d, kt);
    for col in 0..kt {
        for row in 0..d {
            s[(row, col)] = rng.sample::<f64, _>(StandardNormal);
        }
    }

    let c = m2 * &s;
    let mut omega = s.tr_mul(&c);
    // Ω is symmetric in exact arithmetic; enforce it before factoring.
    omega = (&omega + omega.transpose()) * 0.5;

    let svd_c = c.svd(true, true);
    let svd_o = omega.svd(true, true);
    let sc = &svd_c.singular_values;
    let so = &svd_o.singular_values;
    if sc[0] <= 0.0 || sc[k - 1] <= rank_tol_rel * sc[0] {
        return Err(Error::RankDeficient { requested_k: k, sigma_k: sc[k - 1], sigma_max: sc[0] });
    }
    if so[0] <= 0.0 || so[k - 1] <= rank_tol_rel * so[0] {
        return Err(Error::RankDeficient { requested_k: k, sigma_k: so[k - 1], sigma_max: so[0] });
    }

    let u_c = svd_c.u.as_ref().expect("u requested").columns(0, k);
    let d_c = svd_c.v_t.as_ref().expect("v_t requested").rows(0, k).transpose(); // k̃×k
    let d_o = svd_o.v_t.as_ref().expect("v_t requested").rows(0, k).transpose(); // k̃×k

    let mut inner = d_c.transpose() * d_o; // k×k
    for i in 0..k {
        for j in 0..k {
            inner[(i, j)] *= so[j].sqrt() / sc[i];
        }
    }
    let w = u_c * inner;

    // True Moore–Penrose pseudo-inverse via SVD of W itself.
    let svd_w = w.clone().svd(true, true);
    let sw = &svd_w.singular_values;
    if sw[0] <= 0.0 || sw[k - 1] <= 1e-13 * sw[0] {
        return Err(Error::RankDeficient {
            requested_k: k,
            sigma_k: 1.0 / (sw[0] * sw[0]),
            sigma_max: 1.0 / (sw[k - 1] * sw[k - 1]),
        });
    }
    let u_w = svd_w.u.as_ref().expect("u requested");
    let vt_w = svd_w.v_t.as_ref().expect("v_t requested");
    let mut w_pinv = DMatrix::zeros(k, d);
    for i in 0..k {
        // row i of W⁺ = (1/σ_i)·v_i·u_iᵀ accumulated over the k factors
        for row in 0..k {
            let coef = vt_w[(i, row)] / sw[i];
            for colv in 0..d {
                w_pinv[(row, colv)] += coef * u_w[(colv, i)];
            }
        }
    }
    let sigma_k = 1.0 / (sw[0] * sw[0]);
    Ok(WhiteningMatrix { w, w_pinv, sigma_k })
}

/// `‖Wᵀ M₂ W − I_k‖_F`: how well `w` whitens `m2`.
pub fn whitening_residual(w: &DMatrix<f64>, m2: &DMatrix<f64>) -> f64 {
    let k = w.ncols();
    let mut g = w.tr_mul(&(m2 * w));
    for i in 0..k {
        g[(i, i)] -= 1.0;
    }
    g.norm()
}

fn random_unit(dim: usize, rng: &mut ChaCha8Rng) -> DVector<f64> {
    loop {
        let v = DVector::from_fn(dim, |_, _| rng.sample::<f64, _>(StandardNormal));
        let n = v.norm();
        if n > 1e-150 {
            return v / n;
        }
    }
}

/// One normalized power-method sweep; returns `false` (leaving `theta`
/// untouched) if the image collapsed to numerical zero.
fn power_step(t: &SymTensor3, theta: &mut DVector<f64>) -> bool {
    let image = t.apply_vv(theta);
    let norm = image.norm();
    if norm <= 1e-300 {
        return false;
    }
    *theta = image / norm;
    true
}

/// Robust tensor power method with immediate deflation.
///
/// For each of `k` rounds: `restarts` random unit starts each run `iters`
/// power sweeps; the candidate maximizing `t(θ,θ,θ)` (ties: lowest restart
/// index) gets `iters` further sweeps, its eigenvalue is re-read, the pair
/// is recorded and the tensor deflated by `λ·θ^{⊗3}`. Restart seeds derive
/// from `(seed, round, restart)`, so results are identical across thread
/// counts.
///
/// A non-positive winning eigenvalue aborts with
/// [`Error::NegativeEigenvalue`]: the tensor has no k-term decomposition
/// with positive weights at this rank (the practical model-selection signal
/// for overestimated k). A winner whose final sweeps still move by more
/// than 1e-6 records a warning instead.
pub fn robust_tpm(
    tensor: &WhitenedTensor,
    k: usize,
    cfg: &TpmConfig,
) -> Result<EigenDecomposition> {
    let dim = tensor.t.dim();
    check_k(k, dim)?;
    if cfg.restarts < k {
        return Err(Error::InvalidConfig(format!(
            "restarts (L = {}) must be at least k = {k}",
            cfg.restarts
        )));
    }
    if cfg.iters == 0 {
        return Err(Error::InvalidConfig("iteration count (T) must be positive".into()));
    }

    let mut work = tensor.t.clone();
    let mut pairs: Vec<EigenPair> = Vec::with_capacity(k);
    let mut warnings = Vec::new();

    for round in 0..k {
        let candidates: Vec<(f64, DVector<f64>)> = (0..cfg.restarts)
            .into_par_iter()
            .map(|restart| {
                let mut rng = ChaCha8Rng::seed_from_u64(derive2(
                    cfg.seed,
                    Domain::TpmRestart,
                    round as u64,
                    restart as u64,
                ));
                let mut theta = random_unit(dim, &mut rng);
                for _ in 0..cfg.iters {
                    if !power_step(&work, &mut theta) {
                        break;
                    }
                }
                (work.apply_vvv(&theta), theta)
            })
            .collect();

        let mut theta = {
            let mut iter = candidates.into_iter();
            let mut best = iter.next().expect("restarts ≥ k ≥ 1");
            for cand in iter {
                if cand.0 > best.0 {
                    best = cand;
                }
            }
            best.1
        };

        let mut last_step = 0.0;
        for _ in 0..cfg.iters {
            let prev = theta.clone();
            if !power_step(&work, &mut theta) {
                break;
            }
            last_step = (&theta - prev).norm();
        }
        let best_lambda = work.apply_vvv(&theta);
        if last_step > CONVERGENCE_TOL {
            warnings.push(format!(
                "round {round}: power iteration still moving after polish (last step {last_step:.3e})"
            ));
        }
        if best_lambda <= 0.0 {
            return Err(Error::NegativeEigenvalue { round, lambda: best_lambda });
        }
        work.add_scaled_cube(-best_lambda, &theta);
        pairs.push(EigenPair { lambda: best_lambda, omega: theta });
    }

    let mut residual_norm = 0.0f64;
    for probe in 0..RESIDUAL_PROBES {
        let mut rng =
            ChaCha8Rng::seed_from_u64(derive(cfg.seed, Domain::TpmProbe, probe as u64));
        let u = random_unit(dim, &mut rng);
        residual_norm = residual_norm.max(work.apply_vvv(&u).abs());
    }

    pairs.sort_by(|a, b| b.lambda.partial_cmp(&a.lambda).unwrap());
    Ok(EigenDecomposition { pairs, residual_norm, warnings })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{generate_corpus, population_moments, sample_model, SldaModel};
    use crate::moments::estimate_moments;
    use approx::assert_abs_diff_eq;

    fn toy_model() -> SldaModel {
        let topics = DMatrix::from_column_slice(
            5,
            2,
            &[0.35, 0.25, 0.2, 0.15, 0.05, 0.02, 0.08, 0.3, 0.4, 0.2],
        );
        SldaModel::new(vec![0.4, 0.6], topics, vec![1.0, -1.0], 0.2).unwrap()
    }

    fn wrap(t: SymTensor3) -> WhitenedTensor {
        WhitenedTensor { t }
    }

    fn diag_tensor(weights: &[f64]) -> WhitenedTensor {
        let mut t = SymTensor3::zeros(weights.len());
        for (i, &w) in weights.iter().enumerate() {
            let mut e = DVector::zeros(weights.len());
            e[i] = 1.0;
            t.add_scaled_cube(w, &e);
        }
        wrap(t)
    }

    #[test]
    fn exact_whitening_of_identity_is_orthonormal() {
        let m2 = DMatrix::identity(4, 4);
        let wm = whiten_exact(&m2, 4, 1e-10).unwrap();
        assert_abs_diff_eq!((wm.w.tr_mul(&wm.w) - DMatrix::identity(4, 4)).norm(), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(whitening_residual(&wm.w, &m2), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(wm.sigma_k, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(
            (&wm.w_pinv * &wm.w - DMatrix::identity(4, 4)).norm(),
            0.0,
            epsilon = 1e-10
        );
    }

    #[test]
    fn exact_whitening_makes_weighted_topic_images_orthonormal() {
        let model = toy_model();
        let pop = population_moments(&model);
        let wm = whiten_exact(&pop.m2, 2, 1e-10).unwrap();
        let a0 = model.alpha0();
        for i in 0..2 {
            for j in 0..2 {
                let wi = wm.w.tr_mul(&model.topics().column(i).into_owned())
                    * (model.alpha()[i] / (a0 * (a0 + 1.0))).sqrt();
                let wj = wm.w.tr_mul(&model.topics().column(j).into_owned())
                    * (model.alpha()[j] / (a0 * (a0 + 1.0))).sqrt();
                let expected = if i == j { 1.0 } else { 0.0 };
                assert_abs_diff_eq!(wi.dot(&wj), expected, epsilon = 1e-10);
            }
        }
        // pseudo-inverse reconstructs: W⁺ᵀ (Wᵀ μ) maps back through M₂'s range
        assert_abs_diff_eq!(
            (&wm.w_pinv * &wm.w - DMatrix::identity(2, 2)).norm(),
            0.0,
            epsilon = 1e-10
        );
    }

    #[test]
    fn exact_whitening_detects_rank_deficiency() {
        let m2 = DMatrix::from_diagonal(&DVector::from_column_slice(&[1.0, 1e-14]));
        match whiten_exact(&m2, 2, 1e-10).unwrap_err() {
            Error::RankDeficient { requested_k, sigma_k, sigma_max } => {
                assert_eq!(requested_k, 2);
                assert!(sigma_k <= 1e-10 * sigma_max);
            }
            other => panic!("unexpected error {other}"),
        }
        assert_eq!(whiten_exact(&m2, 2, 1e-10).unwrap_err().exit_code(), 10);
        // k = 1 is fine on the same matrix
        assert!(whiten_exact(&m2, 1, 1e-10).is_ok());
    }

    #[test]
    fn whitening_validates_inputs() {
        let mut asym = DMatrix::identity(3, 3);
        asym[(0, 1)] = 0.5;
        assert!(whiten_exact(&asym, 2, 1e-10).is_err());
        let m2 = DMatrix::identity(3, 3);
        assert!(whiten_exact(&m2, 0, 1e-10).is_err());
        assert!(whiten_exact(&m2, 4, 1e-10).is_err());
        assert!(whiten_randomized(&m2, 2, 2, 1e-10, 1).is_err()); // k̃ = 4 > 3
        assert!(whiten_randomized(&m2, 2, 0, 1e-10, 1).is_err());
    }

    #[test]
    fn randomized_whitening_is_exact_on_rank_k_input() {
        let model = sample_model(3, 60, 1.0, 0.2, 11).unwrap();
        let pop = population_moments(&model);
        let wm = whiten_randomized(&pop.m2, 3, 10, 1e-10, 5).unwrap();
        let resid = whitening_residual(&wm.w, &pop.m2);
        assert!(resid <= 1e-6, "residual {resid}");
        assert_abs_diff_eq!(
            (&wm.w_pinv * &wm.w - DMatrix::identity(3, 3)).norm(),
            0.0,
            epsilon = 1e-8
        );
        // agrees with the exact path on the retained spectrum
        let exact = whiten_exact(&pop.m2, 3, 1e-10).unwrap();
        assert_abs_diff_eq!(wm.sigma_k, exact.sigma_k, epsilon = 1e-9 * exact.sigma_k.abs());

        // another seed also whitens, with a different W
        let wm2 = whiten_randomized(&pop.m2, 3, 10, 1e-10, 6).unwrap();
        assert!(whitening_residual(&wm2.w, &pop.m2) <= 1e-6);
        assert!((&wm.w - &wm2.w).norm() > 1e-6);
    }

    #[test]
    fn randomized_whitening_handles_noisy_full_rank_input() {
        let model = sample_model(2, 40, 1.0, 0.3, 21).unwrap();
        let corpus = generate_corpus(&model, 10_000, 100, 22).unwrap();
        let ms = estimate_moments(&corpus, model.alpha0()).unwrap();
        let wm = whiten_randomized(&ms.m2, 2, 10, 1e-10, 23).unwrap();
        let resid = whitening_residual(&wm.w, &ms.m2);
        assert!(resid <= 1e-2, "residual {resid}");
        let exact = whiten_exact(&ms.m2, 2, 1e-10).unwrap();
        assert!(whitening_residual(&exact.w, &ms.m2) <= 1e-6);
    }

    #[test]
    fn tpm_recovers_diagonal_tensor() {
        let t = diag_tensor(&[2.0, 1.0]);
        let dec = robust_tpm(&t, 2, &TpmConfig { restarts: 16, iters: 50, seed: 3 }).unwrap();
        assert_abs_diff_eq!(dec.pairs[0].lambda, 2.0, epsilon = 1e-8);
        assert_abs_diff_eq!(dec.pairs[1].lambda, 1.0, epsilon = 1e-8);
        assert_abs_diff_eq!(dec.pairs[0].omega[0].abs(), 1.0, epsilon = 1e-8);
        assert_abs_diff_eq!(dec.pairs[1].omega[1].abs(), 1.0, epsilon = 1e-8);
        assert!(dec.residual_norm <= 1e-8, "residual {}", dec.residual_norm);
        assert!(dec.warnings.is_empty(), "{:?}", dec.warnings);
    }

    #[test]
    fn tpm_fixes_sign_so_lambda_is_positive() {
        // −0.5·u^⊗3 is the same tensor as +0.5·(−u)^⊗3; the method returns
        // the positive-weight representation.
        let u = DVector::from_column_slice(&[0.6, 0.8]);
        let mut t = SymTensor3::zeros(2);
        t.add_scaled_cube(-0.5, &u);
        let dec = robust_tpm(&wrap(t), 1, &TpmConfig { restarts: 8, iters: 60, seed: 1 }).unwrap();
        assert_abs_diff_eq!(dec.pairs[0].lambda, 0.5, epsilon = 1e-9);
        assert!(dec.pairs[0].omega.dot(&u) < -0.999);
    }

    #[test]
    fn tpm_errors_on_zero_tensor() {
        let t = wrap(SymTensor3::zeros(3));
        match robust_tpm(&t, 2, &TpmConfig { restarts: 4, iters: 5, seed: 0 }).unwrap_err() {
            Error::NegativeEigenvalue { round, lambda } => {
                assert_eq!(round, 0);
                assert_eq!(lambda, 0.0);
            }
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn tpm_errors_when_rank_is_exhausted() {
        // A rank-1 tensor at k = 2: round 0 recovers it, round 1 meets an
        // exactly deflated (zero) remainder.
        let t = diag_tensor(&[1.0, 0.0]);
        let err = robust_tpm(&t, 2, &TpmConfig { restarts: 8, iters: 40, seed: 2 }).unwrap_err();
        match err {
            Error::NegativeEigenvalue { round, .. } => assert_eq!(round, 1),
            other => panic!("unexpected error {other}"),
        }
        assert_eq!(
            robust_tpm(&t, 2, &TpmConfig { restarts: 8, iters: 40, seed: 2 })
                .unwrap_err()
                .exit_code(),
            11
        );
    }

    #[test]
    fn tpm_validates_preconditions() {
        let t = diag_tensor(&[1.0, 1.0]);
        assert!(robust_tpm(&t, 2, &TpmConfig { restarts: 1, iters: 5, seed: 0 }).is_err());
        assert!(robust_tpm(&t, 2, &TpmConfig { restarts: 4, iters: 0, seed: 0 }).is_err());
        assert!(robust_tpm(&t, 3, &TpmConfig::default()).is_err());
        assert!(robust_tpm(&t, 0, &TpmConfig::default()).is_err());
    }

    #[test]
    fn tpm_matches_closed_form_on_population_input() {
        // Whitened population M₃ has eigenvalues (2/(α₀+2))·√(α₀(α₀+1)/α_i)
        // with orthonormal eigenvectors.
        let model = toy_model();
        let a0 = model.alpha0();
        let pop = population_moments(&model);
        let wm = whiten_exact(&pop.m2, 2, 1e-10).unwrap();
        let mut whitened = pop.m3.contract(&wm.w);
        whitened.symmetrize();
        let dec =
            robust_tpm(&wrap(whitened.clone()), 2, &TpmConfig { restarts: 30, iters: 100, seed: 9 })
                .unwrap();

        let mut expected: Vec<f64> = model
            .alpha()
            .iter()
            .map(|&a| 2.0 / (a0 + 2.0) * (a0 * (a0 + 1.0) / a).sqrt())
            .collect();
        expected.sort_by(|a, b| b.partial_cmp(a).unwrap());
        for (pair, l) in dec.pairs.iter().zip(&expected) {
            assert_abs_diff_eq!(pair.lambda, *l, epsilon = 1e-6);
            assert_abs_diff_eq!(pair.omega.norm(), 1.0, epsilon = 1e-10);
        }
        assert!(dec.pairs[0].omega.dot(&dec.pairs[1].omega).abs() <= 1e-6);
        assert!(dec.residual_norm <= 1e-8, "residual {}", dec.residual_norm);

        // reconstruction: subtracting Σ λ ω^⊗3 leaves at most residual_norm
        let mut remainder = whitened;
        for pair in &dec.pairs {
            remainder.add_scaled_cube(-pair.lambda, &pair.omega);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(777);
        for _ in 0..50 {
            let u = random_unit(2, &mut rng);
            assert!(remainder.apply_vvv(&u).abs() <= dec.residual_norm + 1e-8);
        }
    }

    #[test]
    fn tpm_is_deterministic() {
        let model = toy_model();
        let pop = population_moments(&model);
        let wm = whiten_exact(&pop.m2, 2, 1e-10).unwrap();
        let mut whitened = pop.m3.contract(&wm.w);
        whitened.symmetrize();
        let cfg = TpmConfig { restarts: 20, iters: 40, seed: 4 };
        let a = robust_tpm(&wrap(whitened.clone()), 2, &cfg).unwrap();
        let b = robust_tpm(&wrap(whitened), 2, &cfg).unwrap();
        for (pa, pb) in a.pairs.iter().zip(&b.pairs) {
            assert_eq!(pa.lambda.to_bits(), pb.lambda.to_bits());
            assert_eq!(pa.omega, pb.omega);
        }
        assert_eq!(a.residual_norm.to_bits(), b.residual_norm.to_bits());
    }

    #[test]
    fn power_iteration_eigenvalue_is_monotone_on_exact_input() {
        let model = toy_model();
        let pop = population_moments(&model);
        let wm = whiten_exact(&pop.m2, 2, 1e-10).unwrap();
        let mut t = pop.m3.contract(&wm.w);
        t.symmetrize();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..10 {
            let mut theta = random_unit(2, &mut rng);
            let mut prev = t.apply_vvv(&theta);
            for _ in 0..60 {
                if !power_step(&t, &mut theta) {
                    break;
                }
                let cur = t.apply_vvv(&theta);
                assert!(cur >= prev - 1e-12, "eigenvalue estimate decreased: {prev} → {cur}");
                prev = cur;
            }
        }
    }
}
