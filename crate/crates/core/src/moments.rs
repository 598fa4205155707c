//! Empirical moment estimation.
//!
//! Computes first/second-order moment estimates (`M̂₁`, `M̂₂`, `M̂_y`, `N̂₁`,
//! `N̂₂`) densely, and the *whitened* third-order tensors `M̂₃(W,W,W)` /
//! `N̂₃(W,W,W)` directly in k-dimensional space — no V³ object is ever
//! materialized.
//!
//! Per-document estimators (unbiased over distinct word positions):
//! `Ê[x₁] = n/m`, `Ê[x₁⊗x₂] = (n nᵀ − diag n)/(m(m−1))`, and the response
//! blocks `y·n/m`, `y·(n nᵀ − diag n)/(m(m−1))`, `y²`.
//!
//! All estimators fold documents in fixed-size chunks that are merged in
//! document order, so results are bitwise identical across thread counts.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::corpus::{Corpus, Document};
use crate::error::{Error, Result};
use crate::tensor::SymTensor3;

/// Centered first/second-order word moments plus response scalars.
#[derive(Debug, Clone)]
pub struct MomentSet {
    /// `M̂₁ = Ê[x₁]`, length V; nonnegative, sums to 1.
    pub m1: DVector<f64>,
    /// `M̂₂ = Ê[x₁⊗x₂] − α₀/(α₀+1)·M̂₁⊗M̂₁`, symmetric V×V.
    pub m2: DMatrix<f64>,
    /// `M̂_y`, the response-weighted centered pair moment, symmetric V×V.
    pub my: DMatrix<f64>,
    /// `Ê[y]`.
    pub mean_y: f64,
    /// `Ê[y²]`.
    pub mean_y2: f64,
    pub num_docs: usize,
}

/// Centered first/second-order moments of the stacked vector `z = [C·x; y]`.
#[derive(Debug, Clone)]
pub struct JointMomentSet {
    /// `N̂₁ = Ê[z₁]`, length V+1.
    pub n1: DVector<f64>,
    /// `N̂₂ = Ê[z₁⊗z₂] − α₀/(α₀+1)·N̂₁⊗N̂₁ − σ²·e⊗e`, symmetric (V+1)×(V+1).
    pub n2: DMatrix<f64>,
    /// The hyperparameter σ whose square was subtracted from the y-y entry.
    pub sigma_assumed: f64,
    /// Word-coordinate scaling constant C.
    pub scale: f64,
    pub num_docs: usize,
}

/// A third-order tensor already contracted with a whitening matrix on all
/// three modes; exactly supersymmetric after the final symmetrization.
#[derive(Debug, Clone)]
pub struct WhitenedTensor {
    pub t: SymTensor3,
}

/// Work counters for the whitened-tensor builders, used to enforce the
/// complexity contract (per-document work scales with nnz·k², never with
/// V²·docs or m³).
#[derive(Debug, Default, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub struct MomentWork {
    /// Inner-loop operations executed while folding documents.
    pub per_doc_ops: u64,
    /// Inner-loop operations executed in the one-time finalization pass.
    pub finalize_ops: u64,
}

/// Mergeable partial sums of per-document moment contributions.
///
/// `merge` is associative and commutative up to floating-point
/// reassociation; folding documents one by one equals folding any
/// partition and merging the parts in order, bitwise.
#[derive(Debug, Clone)]
pub struct MomentAccumulator {
    sum_x: DVector<f64>,
    sum_pair: DMatrix<f64>,
    sum_yx: DVector<f64>,
    sum_ypair: DMatrix<f64>,
    sum_y: f64,
    sum_y2: f64,
    num_docs: usize,
}

impl MomentAccumulator {
    pub fn new(vocab_size: usize) -> Self {
        MomentAccumulator {
            sum_x: DVector::zeros(vocab_size),
            sum_pair: DMatrix::zeros(vocab_size, vocab_size),
            sum_yx: DVector::zeros(vocab_size),
            sum_ypair: DMatrix::zeros(vocab_size, vocab_size),
            sum_y: 0.0,
            sum_y2: 0.0,
            num_docs: 0,
        }
    }

    /// Add one document's unbiased per-position estimators.
    pub fn fold(&mut self, doc: &Document) {
        let m = doc.num_tokens() as f64;
        debug_assert!(m >= 3.0, "documents need at least 3 tokens");
        let y = doc.response;
        let denom2 = m * (m - 1.0);
        for &(a, ca) in &doc.counts {
            let a = a as usize;
            let ca = f64::from(ca);
            self.sum_x[a] += ca / m;
            self.sum_yx[a] += y * ca / m;
            for &(b, cb) in &doc.counts {
                let b = b as usize;
                let cb = f64::from(cb);
                let pairs = if a == b { ca * (ca - 1.0) } else { ca * cb };
                let value = pairs / denom2;
                self.sum_pair[(a, b)] += value;
                self.sum_ypair[(a, b)] += y * value;
            }
        }
        self.sum_y += y;
        self.sum_y2 += y * y;
        self.num_docs += 1;
    }

    pub fn merge(&mut self, other: &MomentAccumulator) {
        self.sum_x += &other.sum_x;
        self.sum_pair += &other.sum_pair;
        self.sum_yx += &other.sum_yx;
        self.sum_ypair += &other.sum_ypair;
        self.sum_y += other.sum_y;
        self.sum_y2 += other.sum_y2;
        self.num_docs += other.num_docs;
    }

    /// Average the sums and apply the α₀ centering combination.
    pub fn finalize(&self, alpha0: f64) -> Result<MomentSet> {
        check_alpha0(alpha0)?;
        if self.num_docs == 0 {
            return Err(Error::InvalidConfig("no documents accumulated".into()));
        }
        let n = self.num_docs as f64;
        let m1 = &self.sum_x / n;
        let e_pair = &self.sum_pair / n;
        let e_yx = &self.sum_yx / n;
        let e_ypair = &self.sum_ypair / n;
        let mean_y = self.sum_y / n;
        let mean_y2 = self.sum_y2 / n;

        let m2 = &e_pair - (alpha0 / (alpha0 + 1.0)) * (&m1 * m1.transpose());
        let my = &e_ypair
            - (alpha0 / (alpha0 + 2.0))
                * (mean_y * &e_pair + &m1 * e_yx.transpose() + &e_yx * m1.transpose())
            + (2.0 * alpha0 * alpha0 / ((alpha0 + 1.0) * (alpha0 + 2.0)))
                * mean_y
                * (&m1 * m1.transpose());
        Ok(MomentSet { m1, m2, my, mean_y, mean_y2, num_docs: self.num_docs })
    }
}

/// Mergeable partial sums for the stacked-vector moments.
#[derive(Debug, Clone)]
pub struct JointMomentAccumulator {
    sum_x: DVector<f64>,
    sum_pair: DMatrix<f64>,
    sum_yx: DVector<f64>,
    sum_y: f64,
    sum_y2: f64,
    num_docs: usize,
}

impl JointMomentAccumulator {
    pub fn new(vocab_size: usize) -> Self {
        JointMomentAccumulator {
            sum_x: DVector::zeros(vocab_size),
            sum_pair: DMatrix::zeros(vocab_size, vocab_size),
            sum_yx: DVector::zeros(vocab_size),
            sum_y: 0.0,
            sum_y2: 0.0,
            num_docs: 0,
        }
    }

    pub fn fold(&mut self, doc: &Document) {
        let m = doc.num_tokens() as f64;
        debug_assert!(m >= 3.0, "documents need at least 3 tokens");
        let y = doc.response;
        let denom2 = m * (m - 1.0);
        for &(a, ca) in &doc.counts {
            let a = a as usize;
            let ca = f64::from(ca);
            self.sum_x[a] += ca / m;
            self.sum_yx[a] += y * ca / m;
            for &(b, cb) in &doc.counts {
                let b = b as usize;
                let cb = f64::from(cb);
                let pairs = if a == b { ca * (ca - 1.0) } else { ca * cb };
                self.sum_pair[(a, b)] += pairs / denom2;
            }
        }
        self.sum_y += y;
        self.sum_y2 += y * y;
        self.num_docs += 1;
    }

    pub fn merge(&mut self, other: &JointMomentAccumulator) {
        self.sum_x += &other.sum_x;
        self.sum_pair += &other.sum_pair;
        self.sum_yx += &other.sum_yx;
        self.sum_y += other.sum_y;
        self.sum_y2 += other.sum_y2;
        self.num_docs += other.num_docs;
    }

    /// Assemble `N̂₁`/`N̂₂` at the given word scaling, subtracting the assumed
    /// noise variance from the response diagonal exactly once.
    pub fn finalize(&self, alpha0: f64, sigma: f64, scale: f64) -> Result<JointMomentSet> {
        check_alpha0(alpha0)?;
        check_sigma_scale(sigma, scale)?;
        if self.num_docs == 0 {
            return Err(Error::InvalidConfig("no documents accumulated".into()));
        }
        let v = self.sum_x.len();
        let n = self.num_docs as f64;

        let mut n1 = DVector::zeros(v + 1);
        for a in 0..v {
            n1[a] = scale * self.sum_x[a] / n;
        }
        n1[v] = self.sum_y / n;

        // Raw Ê[z₁⊗z₂]: word-word scaled by C², word-y by C, y-y = Ê[y²].
        let mut n2 = DMatrix::zeros(v + 1, v + 1);
        let c2 = scale * scale;
        for a in 0..v {
            for b in 0..v {
                n2[(a, b)] = c2 * self.sum_pair[(a, b)] / n;
            }
            let cross = scale * self.sum_yx[a] / n;
            n2[(a, v)] = cross;
            n2[(v, a)] = cross;
        }
        n2[(v, v)] = self.sum_y2 / n;

        n2 -= (alpha0 / (alpha0 + 1.0)) * (&n1 * n1.transpose());
        n2[(v, v)] -= sigma * sigma;
        Ok(JointMomentSet {
            n1,
            n2,
            sigma_assumed: sigma,
            scale,
            num_docs: self.num_docs,
        })
    }
}

fn check_alpha0(alpha0: f64) -> Result<()> {
    if !alpha0.is_finite() || alpha0 <= 0.0 {
        return Err(Error::InvalidConfig(format!("alpha0 must be positive, got {alpha0}")));
    }
    Ok(())
}

fn check_sigma_scale(sigma: f64, scale: f64) -> Result<()> {
    if !sigma.is_finite() || sigma < 0.0 {
        return Err(Error::InvalidConfig(format!("sigma must be nonnegative, got {sigma}")));
    }
    if !scale.is_finite() || scale <= 0.0 {
        return Err(Error::InvalidConfig(format!("scale must be positive, got {scale}")));
    }
    Ok(())
}

/// Documents per parallel fold chunk; chunk results are merged in document
/// order so the total is independent of the thread count.
const CHUNK_SIZE: usize = 1024;

fn fold_in_chunks<S, I, F, M>(docs: &[Document], init: I, fold: F, merge: M) -> S
where
    S: Send,
    I: Fn() -> S + Sync,
    F: Fn(&mut S, &Document) + Sync,
    M: Fn(&mut S, S),
{
    let parts: Vec<S> = docs
        .par_chunks(CHUNK_SIZE)
        .map(|chunk| {
            let mut state = init();
            for doc in chunk {
                fold(&mut state, doc);
            }
            state
        })
        .collect();
    let mut iter = parts.into_iter();
    let mut acc = iter.next().expect("corpus is non-empty");
    for part in iter {
        merge(&mut acc, part);
    }
    acc
}

/// Estimate the centered word moments of a corpus.
pub fn estimate_moments(corpus: &Corpus, alpha0: f64) -> Result<MomentSet> {
    check_alpha0(alpha0)?;
    let v = corpus.vocab_size();
    let acc = fold_in_chunks(
        corpus.documents(),
        || MomentAccumulator::new(v),
        |acc, doc| acc.fold(doc),
        |acc, part| acc.merge(&part),
    );
    acc.finalize(alpha0)
}

/// Estimate the centered stacked-vector moments of a corpus.
pub fn estimate_joint_moments(
    corpus: &Corpus,
    alpha0: f64,
    sigma: f64,
    scale: f64,
) -> Result<JointMomentSet> {
    check_alpha0(alpha0)?;
    check_sigma_scale(sigma, scale)?;
    let v = corpus.vocab_size();
    let acc = fold_in_chunks(
        corpus.documents(),
        || JointMomentAccumulator::new(v),
        |acc, doc| acc.fold(doc),
        |acc, part| acc.merge(&part),
    );
    acc.finalize(alpha0, sigma, scale)
}

struct WordTrickState {
    t: SymTensor3,
    /// Whitened raw pair moment sum, Σ_d Wᵀ Ê_d[x₁⊗x₂] W.
    pair_w: DMatrix<f64>,
    /// Deferred coefficients of the Σ_a (…)·g_a^⊗3 correction.
    cube_weights: Vec<f64>,
    ops: u64,
}

/// Compute `M̂₃(W,W,W)` without forming any V³ object.
///
/// Per document, with `s1 = Wᵀn` and `S2 = Wᵀ diag(n) W`:
/// `T_d = [s1^⊗3 − sym₃(S2 ⊗ s1) + 2·Σ_a n_a g_a^⊗3]/(m(m−1)(m−2))`,
/// where `g_a` is row `a` of `W` and `sym₃` sums the three symmetric
/// placements. The `g_a^⊗3` sum is deferred to one pass at the end. The α₀
/// centering (three placements of `Ê[x₁⊗x₂] ⊗ M̂₁` and the `M̂₁^⊗3` term) is
/// applied in whitened space, then the tensor is symmetrized.
///
/// `m1` is the first-moment vector whose whitened image enters the
/// centering — pass the estimate from the same corpus.
pub fn whitened_m3(
    corpus: &Corpus,
    alpha0: f64,
    w: &DMatrix<f64>,
    m1: &DVector<f64>,
) -> Result<(WhitenedTensor, MomentWork)> {
    check_alpha0(alpha0)?;
    let v = corpus.vocab_size();
    if w.nrows() != v || m1.len() != v {
        return Err(Error::DimensionMismatch(format!(
            "whitening matrix has {} rows and m1 has {} entries; corpus vocabulary is {v}",
            w.nrows(),
            m1.len()
        )));
    }
    let k = w.ncols();
    let wt = w.transpose(); // k×V, columns contiguous per word

    let merged = fold_in_chunks(
        corpus.documents(),
        || WordTrickState {
            t: SymTensor3::zeros(k),
            pair_w: DMatrix::zeros(k, k),
            cube_weights: vec![0.0; v],
            ops: 0,
        },
        |state, doc| {
            let m = doc.num_tokens() as f64;
            let denom2 = m * (m - 1.0);
            let denom3 = denom2 * (m - 2.0);
            let mut s1 = DVector::zeros(k);
            let mut s2 = DMatrix::zeros(k, k);
            for &(a, c) in &doc.counts {
                let g = wt.column(a as usize);
                let c = f64::from(c);
                s1.axpy(c, &g, 1.0);
                s2.ger(c, &g, &g, 1.0);
                state.cube_weights[a as usize] += 2.0 * c / denom3;
            }
            state.t.add_scaled_cube(1.0 / denom3, &s1);
            state.t.add_scaled_sym_outer(-1.0 / denom3, &s2, &s1);
            state.pair_w.ger(1.0 / denom2, &s1, &s1, 1.0);
            state
                .pair_w
                .iter_mut()
                .zip(s2.iter())
                .for_each(|(dst, src)| *dst -= src / denom2);
            let nnz = doc.counts.len() as u64;
            let kk = k as u64;
            state.ops += nnz * (kk + kk * kk + 1) + 2 * kk * kk * kk + 2 * kk * kk;
        },
        |acc, part| {
            acc.t.add_scaled(1.0, &part.t);
            acc.pair_w += &part.pair_w;
            acc.cube_weights
                .iter_mut()
                .zip(&part.cube_weights)
                .for_each(|(dst, src)| *dst += src);
            acc.ops += part.ops;
        },
    );

    let WordTrickState { mut t, mut pair_w, cube_weights, ops } = merged;
    let mut finalize_ops = 0u64;
    let kk = k as u64;
    let n = corpus.num_docs() as f64;
    // The fold accumulated per-document tensors; turn sums into averages.
    t.scale(1.0 / n);
    finalize_ops += kk * kk * kk;
    for (a, &cw) in cube_weights.iter().enumerate() {
        if cw != 0.0 {
            t.add_scaled_cube(cw / n, &wt.column(a).into_owned());
            finalize_ops += kk * kk * kk;
        }
    }
    pair_w /= n;
    finalize_ops += kk * kk;
    let m1w = w.tr_mul(m1);
    finalize_ops += (v as u64) * kk;
    t.add_scaled_sym_outer(-alpha0 / (alpha0 + 2.0), &pair_w, &m1w);
    t.add_scaled_cube(
        2.0 * alpha0 * alpha0 / ((alpha0 + 1.0) * (alpha0 + 2.0)),
        &m1w,
    );
    t.symmetrize();
    finalize_ops += 3 * kk * kk * kk;

    Ok((WhitenedTensor { t }, MomentWork { per_doc_ops: ops, finalize_ops }))
}

struct JointTrickState {
    t: SymTensor3,
    pair_w: DMatrix<f64>,
    cube_weights: Vec<f64>,
    /// Deferred `sym₃(A ⊗ w_y)` matrix: A = Σ_d (2C²y_d/denom3_d)·P_d.
    a_mat: DMatrix<f64>,
    /// Deferred `sym₃(w_y w_yᵀ ⊗ b)` vector: b = Σ_d (2C y_d²/denom3_d)·u_d.
    b_vec: DVector<f64>,
    /// Deferred coefficient of `w_y^⊗3`: Σ_d 2·m_d·y_d³/denom3_d.
    wy3_coef: f64,
    ops: u64,
}

/// Compute `N̂₃(W,W,W)` for `z = [C·x; y]` without forming any (V+1)³ object.
///
/// `w` is the (V+1)×k whitening matrix; its word rows `g_a` and response row
/// `w_y` are handled block-wise. Per document (`u = W_xᵀn`,
/// `P = W_xᵀ diag(n) W_x`): the single-position sums are
/// `S1 = C·u + m·y·w_y`, `S2 = C²P + C·y(u w_yᵀ + w_y uᵀ) + m·y²·w_y w_yᵀ`,
/// and the same-position cube correction splits into four deferred pieces
/// (word cube weights, `P`-weighted, `u`-weighted, and a scalar for
/// `w_y^⊗3`). The α₀ centering and the −2σ²/(α₀+2) noise correction (three
/// placements of `w_y w_yᵀ ⊗ Wᵀn̂₁`) are applied in whitened space.
///
/// `n1` is the stacked first-moment vector entering the centering — pass the
/// estimate from the same corpus at the same scale.
pub fn whitened_n3(
    corpus: &Corpus,
    alpha0: f64,
    sigma: f64,
    scale: f64,
    w: &DMatrix<f64>,
    n1: &DVector<f64>,
) -> Result<(WhitenedTensor, MomentWork)> {
    check_alpha0(alpha0)?;
    check_sigma_scale(sigma, scale)?;
    let v = corpus.vocab_size();
    if w.nrows() != v + 1 || n1.len() != v + 1 {
        return Err(Error::DimensionMismatch(format!(
            "whitening matrix has {} rows and n1 has {} entries; expected V+1 = {}",
            w.nrows(),
            n1.len(),
            v + 1
        )));
    }
    let k = w.ncols();
    let wt = w.transpose(); // k×(V+1)
    let wy = wt.column(v).into_owned(); // whitened response row

    let merged = fold_in_chunks(
        corpus.documents(),
        || JointTrickState {
            t: SymTensor3::zeros(k),
            pair_w: DMatrix::zeros(k, k),
            cube_weights: vec![0.0; v],
            a_mat: DMatrix::zeros(k, k),
            b_vec: DVector::zeros(k),
            wy3_coef: 0.0,
            ops: 0,
        },
        |state, doc| {
            let m = doc.num_tokens() as f64;
            let y = doc.response;
            let denom2 = m * (m - 1.0);
            let denom3 = denom2 * (m - 2.0);
            let mut u = DVector::zeros(k);
            let mut p = DMatrix::zeros(k, k);
            for &(a, c) in &doc.counts {
                let g = wt.column(a as usize);
                let c = f64::from(c);
                u.axpy(c, &g, 1.0);
                p.ger(c, &g, &g, 1.0);
                state.cube_weights[a as usize] += 2.0 * c * scale.powi(3) / denom3;
            }
            // Single-position sums of Wᵀz over the document.
            let mut s1 = &u * scale;
            s1.axpy(m * y, &wy, 1.0);
            let mut s2 = DMatrix::zeros(k, k);
            let c2 = scale * scale;
            let cy = scale * y;
            let myy = m * y * y;
            for j in 0..k {
                for i in 0..k {
                    s2[(i, j)] =
                        c2 * p[(i, j)] + cy * (u[i] * wy[j] + wy[i] * u[j]) + myy * wy[i] * wy[j];
                }
            }
            state.t.add_scaled_cube(1.0 / denom3, &s1);
            state.t.add_scaled_sym_outer(-1.0 / denom3, &s2, &s1);
            // Same-position cube Σ_pos (Wᵀz_pos)^⊗3, expanded in powers of y
            // and deferred: the word-cube part above, plus
            // C²y·sym₃(P⊗w_y) + Cy²·sym₃(w_y w_yᵀ⊗u) + m·y³·w_y^⊗3.
            let ca = 2.0 * c2 * y / denom3;
            state.a_mat.iter_mut().zip(p.iter()).for_each(|(dst, src)| *dst += ca * src);
            state.b_vec.axpy(2.0 * cy * y / denom3, &u, 1.0);
            state.wy3_coef += 2.0 * m * y.powi(3) / denom3;
            state.pair_w.ger(1.0 / denom2, &s1, &s1, 1.0);
            state
                .pair_w
                .iter_mut()
                .zip(s2.iter())
                .for_each(|(dst, src)| *dst -= src / denom2);
            let nnz = doc.counts.len() as u64;
            let kk = k as u64;
            state.ops +=
                nnz * (kk + kk * kk + 1) + 2 * kk * kk * kk + 5 * kk * kk + 2 * kk + 1;
        },
        |acc, part| {
            acc.t.add_scaled(1.0, &part.t);
            acc.pair_w += &part.pair_w;
            acc.cube_weights
                .iter_mut()
                .zip(&part.cube_weights)
                .for_each(|(dst, src)| *dst += src);
            acc.a_mat += &part.a_mat;
            acc.b_vec += &part.b_vec;
            acc.wy3_coef += part.wy3_coef;
            acc.ops += part.ops;
        },
    );

    let JointTrickState { mut t, mut pair_w, cube_weights, a_mat, b_vec, wy3_coef, ops } = merged;
    let mut finalize_ops = 0u64;
    let kk = k as u64;
    let n = corpus.num_docs() as f64;
    // The fold accumulated per-document tensors; turn sums into averages.
    t.scale(1.0 / n);
    finalize_ops += kk * kk * kk;
    for (a, &cw) in cube_weights.iter().enumerate() {
        if cw != 0.0 {
            t.add_scaled_cube(cw / n, &wt.column(a).into_owned());
            finalize_ops += kk * kk * kk;
        }
    }
    let wy_outer = &wy * wy.transpose();
    t.add_scaled_sym_outer(1.0 / n, &a_mat, &wy);
    t.add_scaled_sym_outer(1.0 / n, &wy_outer, &b_vec);
    t.add_scaled_cube(wy3_coef / n, &wy);
    finalize_ops += 3 * kk * kk * kk + kk * kk;

    pair_w /= n;
    finalize_ops += kk * kk;
    let n1w = w.tr_mul(n1);
    finalize_ops += (v as u64 + 1) * kk;
    t.add_scaled_sym_outer(-alpha0 / (alpha0 + 2.0), &pair_w, &n1w);
    t.add_scaled_cube(
        2.0 * alpha0 * alpha0 / ((alpha0 + 1.0) * (alpha0 + 2.0)),
        &n1w,
    );
    t.add_scaled_sym_outer(-2.0 * sigma * sigma / (alpha0 + 2.0), &wy_outer, &n1w);
    t.symmetrize();
    finalize_ops += 4 * kk * kk * kk;

    Ok((WhitenedTensor { t }, MomentWork { per_doc_ops: ops, finalize_ops }))
}

/// Write a human-readable dump of first/second-order word moments.
pub fn write_moment_dump(moments: &MomentSet, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    let v = moments.m1.len();
    (|| -> std::io::Result<()> {
        writeln!(out, "slda-moments v1")?;
        writeln!(out, "vocab {v} docs {}", moments.num_docs)?;
        writeln!(out, "mean_y {} mean_y2 {}", moments.mean_y, moments.mean_y2)?;
        for (name, mat) in [("m2", &moments.m2), ("my", &moments.my)] {
            writeln!(out, "{name}")?;
            for i in 0..v {
                let row: Vec<String> = (0..v).map(|j| format!("{}", mat[(i, j)])).collect();
                writeln!(out, "{}", row.join(" "))?;
            }
        }
        writeln!(out, "m1")?;
        let row: Vec<String> = (0..v).map(|i| format!("{}", moments.m1[i])).collect();
        writeln!(out, "{}", row.join(" "))?;
        out.flush()
    })()
    .map_err(|e| Error::io(path, e))
}
