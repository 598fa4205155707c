//! Dense symmetric third-order tensors of small dimension.
//!
//! Recovery runs entirely on k×k×k tensors (k = number of topics), so a
//! flat dense buffer is the right representation: every operation the
//! power method needs is a tight loop over `dim³` entries.

use nalgebra::{DMatrix, DVector};

/// Dense third-order tensor with entry `(i, j, l)` at `data[i·d² + j·d + l]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymTensor3 {
    dim: usize,
    data: Vec<f64>,
}

impl SymTensor3 {
    /// Zero tensor of dimension `dim × dim × dim`.
    pub fn zeros(dim: usize) -> Self {
        SymTensor3 {
            dim,
            data: vec![0.0; dim * dim * dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, l: usize) -> f64 {
        self.data[(i * self.dim + j) * self.dim + l]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, l: usize, value: f64) {
        self.data[(i * self.dim + j) * self.dim + l] = value;
    }

    #[inline]
    pub fn add_entry(&mut self, i: usize, j: usize, l: usize, value: f64) {
        self.data[(i * self.dim + j) * self.dim + l] += value;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// `self += coef · v⊗v⊗v`.
    pub fn add_scaled_cube(&mut self, coef: f64, v: &DVector<f64>) {
        let d = self.dim;
        debug_assert_eq!(v.len(), d);
        let mut idx = 0;
        for i in 0..d {
            let ci = coef * v[i];
            for j in 0..d {
                let cij = ci * v[j];
                for l in 0..d {
                    self.data[idx] += cij * v[l];
                    idx += 1;
                }
            }
        }
    }

    /// `self += coef · (M⊗v + placements)`, i.e. entry `(i,j,l)` gains
    /// `coef · (M[i,j]·v[l] + M[i,l]·v[j] + M[j,l]·v[i])`.
    /// Supersymmetric whenever `M` is symmetric.
    pub fn add_scaled_sym_outer(&mut self, coef: f64, m: &DMatrix<f64>, v: &DVector<f64>) {
        let d = self.dim;
        debug_assert_eq!(m.nrows(), d);
        debug_assert_eq!(m.ncols(), d);
        debug_assert_eq!(v.len(), d);
        let mut idx = 0;
        for i in 0..d {
            for j in 0..d {
                let mij = m[(i, j)];
                for l in 0..d {
                    self.data[idx] += coef * (mij * v[l] + m[(i, l)] * v[j] + m[(j, l)] * v[i]);
                    idx += 1;
                }
            }
        }
    }

    /// `self += coef · other` (dimensions must match).
    pub fn add_scaled(&mut self, coef: f64, other: &SymTensor3) {
        debug_assert_eq!(self.dim, other.dim);
        for (a, b) in self.data.iter_mut().zip(other.data.iter()) {
            *a += coef * b;
        }
    }

    pub fn scale(&mut self, c: f64) {
        for a in self.data.iter_mut() {
            *a *= c;
        }
    }

    /// Contraction `t(I, θ, θ)`: returns the vector with entries
    /// `Σ_{j,l} T[i,j,l]·θ[j]·θ[l]`.
    pub fn apply_vv(&self, theta: &DVector<f64>) -> DVector<f64> {
        let d = self.dim;
        debug_assert_eq!(theta.len(), d);
        let mut out = DVector::zeros(d);
        let mut idx = 0;
        for i in 0..d {
            let mut acc = 0.0;
            for j in 0..d {
                let tj = theta[j];
                let mut row = 0.0;
                for l in 0..d {
                    row += self.data[idx] * theta[l];
                    idx += 1;
                }
                acc += tj * row;
            }
            out[i] = acc;
        }
        out
    }

    /// Full contraction `t(θ, θ, θ)`.
    pub fn apply_vvv(&self, theta: &DVector<f64>) -> f64 {
        self.apply_vv(theta).dot(theta)
    }

    /// Replace the tensor by its symmetrization: each entry becomes the mean
    /// over the six index permutations. The mean is computed once per sorted
    /// index triple and written to every permutation, so the result is
    /// *exactly* supersymmetric.
    pub fn symmetrize(&mut self) {
        let d = self.dim;
        for i in 0..d {
            for j in i..d {
                for l in j..d {
                    let sum = self.get(i, j, l)
                        + self.get(i, l, j)
                        + self.get(j, i, l)
                        + self.get(j, l, i)
                        + self.get(l, i, j)
                        + self.get(l, j, i);
                    let mean = sum / 6.0;
                    self.set(i, j, l, mean);
                    self.set(i, l, j, mean);
                    self.set(j, i, l, mean);
                    self.set(j, l, i, mean);
                    self.set(l, i, j, mean);
                    self.set(l, j, i, mean);
                }
            }
        }
    }

    /// Largest absolute difference between an entry and any of its
    /// permutations; zero for a supersymmetric tensor.
    pub fn max_asymmetry(&self) -> f64 {
        let d = self.dim;
        let mut worst: f64 = 0.0;
        for i in 0..d {
            for j in i..d {
                for l in j..d {
                    let vals = [
                        self.get(i, j, l),
                        self.get(i, l, j),
                        self.get(j, i, l),
                        self.get(j, l, i),
                        self.get(l, i, j),
                        self.get(l, j, i),
                    ];
                    let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min);
                    let hi = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                    worst = worst.max(hi - lo);
                }
            }
        }
        worst
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// Contract every mode with `w` (size `dim × k`), producing the k×k×k
    /// tensor with entries `Σ_{a,b,c} T[a,b,c]·w[a,i]·w[b,j]·w[c,l]`.
    ///
    /// Staged mode-by-mode contraction, O(dim³·k + dim²·k² + dim·k³).
    pub fn contract(&self, w: &DMatrix<f64>) -> SymTensor3 {
        let d = self.dim;
        let k = w.ncols();
        assert_eq!(
            w.nrows(),
            d,
            "contraction matrix must have {d} rows, got {}",
            w.nrows()
        );
        // Stage 1: over the last mode. t1[(a,b),j] = Σ_c T[a,b,c] w[c,j]
        let mut t1 = vec![0.0; d * d * k];
        for a in 0..d {
            for b in 0..d {
                let base = (a * d + b) * d;
                let out = (a * d + b) * k;
                for c in 0..d {
                    let v = self.data[base + c];
                    if v != 0.0 {
                        for j in 0..k {
                            t1[out + j] += v * w[(c, j)];
                        }
                    }
                }
            }
        }
        // Stage 2: over the middle mode. t2[(a,l),j] = Σ_b t1[(a,b),j] w[b,l]
        let mut t2 = vec![0.0; d * k * k];
        for a in 0..d {
            for b in 0..d {
                let src = (a * d + b) * k;
                for l in 0..k {
                    let wbl = w[(b, l)];
                    let out = (a * k + l) * k;
                    for j in 0..k {
                        t2[out + j] += t1[src + j] * wbl;
                    }
                }
            }
        }
        // Stage 3: over the first mode. t2[(a,l),j] holds the value whose
        // output middle index is l and output last index is j.
        let mut result = SymTensor3::zeros(k);
        for a in 0..d {
            for i in 0..k {
                let wai = w[(a, i)];
                for l in 0..k {
                    let src = (a * k + l) * k;
                    let out = (i * k + l) * k;
                    for j in 0..k {
                        result.data[out + j] += wai * t2[src + j];
                    }
                }
            }
        }
        result
    }
}
