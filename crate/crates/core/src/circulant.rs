//! Block-circulant matrices and their FFT-accelerated products.
//!
//! Each `k×k` block is circulant and is stored as its defining vector, the
//! block's first column: entry `(u, v)` equals `w[(u - v) mod k]`, so the
//! block times `x` is the circular convolution `w ⊛ x` and is computed as
//! `irfft(rfft(w) ∘ rfft(x))`.
//!
//! Block sizes that are not powers of two are embedded into a zero-padded
//! power-of-two transform of length at least `2k - 1` and folded back; block
//! size 1 degenerates to an ordinary dense matrix.

use std::borrow::Cow;
use std::sync::Arc;

use crate::error::{check_len, Error, Result};
use crate::fft::{FftPlan, OpCounter, Spectrum};
use crate::scalar::Scalar;

/// Row-major dense matrix; the oracle representation.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix<T> {
    pub rows: usize,
    pub cols: usize,
    pub entries: Vec<T>,
}

impl<T: Scalar> DenseMatrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, entries: vec![T::zero(); rows * cols] }
    }

    pub fn get(&self, r: usize, c: usize) -> T {
        self.entries[r * self.cols + c]
    }

    pub fn matvec(&self, x: &[T]) -> Result<Vec<T>> {
        check_len(self.cols, x.len())?;
        Ok(self
            .entries
            .chunks_exact(self.cols.max(1))
            .take(self.rows)
            .map(|row| row.iter().zip(x).map(|(&a, &b)| a * b).sum())
            .collect())
    }

    pub fn transpose(&self) -> Self {
        let mut out = Self::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.entries[c * self.rows + r] = self.get(r, c);
            }
        }
        out
    }
}

/// Circular convolution `y[u] = Σ_t w[t]·x[(u - t) mod k]`, evaluated directly.
pub fn circ_matvec_dense<T: Scalar>(w: &[T], x: &[T]) -> Result<Vec<T>> {
    check_len(w.len(), x.len())?;
    let k = w.len();
    Ok((0..k)
        .map(|u| (0..k).map(|t| w[t] * x[(u + k - t) % k]).sum())
        .collect())
}

/// Circulant product through the spectrum of its defining vector.
pub fn circ_matvec_fft<T: Scalar>(plan: &FftPlan<T>, w_spec: &Spectrum<T>, x: &[T]) -> Result<Vec<T>> {
    check_len(plan.size(), w_spec.full_size())?;
    check_len(plan.size(), x.len())?;
    let mut acc = Spectrum::zeros(plan.size());
    acc.mul_acc(w_spec, &plan.rfft(x)?, &mut OpCounter::new());
    plan.irfft(&acc)
}

/// `v'[t] = v[-t mod k]`.
pub fn circular_reverse<T: Copy>(v: &[T]) -> Vec<T> {
    let k = v.len();
    (0..k).map(|t| v[(k - t) % k]).collect()
}

/// Transform machinery for one block size.
#[derive(Debug)]
pub struct CirculantKernel<T> {
    k: usize,
    len: usize,
    plan: Option<FftPlan<T>>,
}

impl<T: Scalar> CirculantKernel<T> {
    pub fn new(k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidShape("block size must be positive".into()));
        }
        let len = if k == 1 || k.is_power_of_two() { k } else { (2 * k - 1).next_power_of_two() };
        let plan = if len > 1 { Some(FftPlan::new(len)?) } else { None };
        Ok(Self { k, len, plan })
    }

    pub fn block_size(&self) -> usize {
        self.k
    }

    /// Transform length; equals `k` unless `k` had to be embedded.
    pub fn transform_len(&self) -> usize {
        self.len
    }

    fn embedded(&self) -> bool {
        self.len != self.k
    }

    /// Spectrum of a length-`k` vector (zero-padded when embedded).
    pub fn spectrum(&self, v: &[T], ops: &mut OpCounter) -> Spectrum<T> {
        debug_assert_eq!(v.len(), self.k);
        match &self.plan {
            None => Spectrum::scalar(v[0]),
            Some(plan) if self.embedded() => {
                let mut padded = vec![T::zero(); self.len];
                padded[..self.k].copy_from_slice(v);
                plan.rfft_counted(&padded, ops).expect("padded length matches plan")
            }
            Some(plan) => plan.rfft_counted(v, ops).expect("length checked by caller"),
        }
    }

    /// Spectrum of the circular reversal of `v`, given `spec = spectrum(v)`.
    pub fn reversed_spectrum(&self, v: &[T], spec: &Spectrum<T>, ops: &mut OpCounter) -> Spectrum<T> {
        if self.embedded() {
            self.spectrum(&circular_reverse(v), ops)
        } else {
            spec.conj()
        }
    }

    /// Back to a length-`k` vector, folding the linear-convolution tail when embedded.
    pub fn finish(&self, spec: &Spectrum<T>, ops: &mut OpCounter) -> Vec<T> {
        match &self.plan {
            None => vec![spec.coeffs()[0].re],
            Some(plan) => {
                let mut z = plan.irfft_counted(spec, ops).expect("accumulators are built with the kernel length");
                if self.embedded() {
                    let k = self.k;
                    for u in 0..k - 1 {
                        let tail = z[u + k];
                        z[u] += tail;
                    }
                    ops.real_adds += (k - 1) as u64;
                    z.truncate(k);
                }
                z
            }
        }
    }
}

/// One `k×k` circulant tile.
#[derive(Debug, Clone)]
pub struct CirculantBlock<T> {
    w: Vec<T>,
    cached_spectrum: Option<Spectrum<T>>,
}

impl<T: Scalar> CirculantBlock<T> {
    pub fn weights(&self) -> &[T] {
        &self.w
    }

    pub fn cached_spectrum(&self) -> Option<&Spectrum<T>> {
        self.cached_spectrum.as_ref()
    }
}

/// An `m×n` matrix tiled into `p×q` circulant blocks of size `k`.
///
/// Inputs are zero-padded to `q·k` and outputs truncated to `m`, so only the
/// last block row/column carries padding.
#[derive(Debug, Clone)]
pub struct BlockCirculantMatrix<T> {
    rows: usize,
    cols: usize,
    k: usize,
    p: usize,
    q: usize,
    blocks: Vec<CirculantBlock<T>>,
    kernel: Arc<CirculantKernel<T>>,
}

impl<T: Scalar> BlockCirculantMatrix<T> {
    pub fn zeros(rows: usize, cols: usize, k: usize) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidShape(format!("{rows}×{cols} matrix")));
        }
        let kernel = Arc::new(CirculantKernel::new(k)?);
        let (p, q) = (rows.div_ceil(k), cols.div_ceil(k));
        let blocks = vec![CirculantBlock { w: vec![T::zero(); k], cached_spectrum: None }; p * q];
        Ok(Self { rows, cols, k, p, q, blocks, kernel })
    }

    /// Builds from the `p·q·k` defining-vector values, block-row-major.
    pub fn from_flat(rows: usize, cols: usize, k: usize, values: &[T]) -> Result<Self> {
        let mut m = Self::zeros(rows, cols, k)?;
        m.set_weights(values)?;
        Ok(m)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn block_size(&self) -> usize {
        self.k
    }

    /// Block-row count `p = ceil(m/k)`.
    pub fn block_rows(&self) -> usize {
        self.p
    }

    /// Block-column count `q = ceil(n/k)`.
    pub fn block_cols(&self) -> usize {
        self.q
    }

    pub fn kernel(&self) -> &CirculantKernel<T> {
        &self.kernel
    }

    pub fn block(&self, i: usize, j: usize) -> &CirculantBlock<T> {
        &self.blocks[i * self.q + j]
    }

    pub fn set_block(&mut self, i: usize, j: usize, w: &[T]) -> Result<()> {
        check_len(self.k, w.len())?;
        let block = &mut self.blocks[i * self.q + j];
        block.w.copy_from_slice(w);
        block.cached_spectrum = None;
        Ok(())
    }

    /// Stored parameter count, `p·q·k`.
    pub fn param_count(&self) -> usize {
        self.p * self.q * self.k
    }

    /// All defining vectors concatenated block-row-major.
    pub fn weights(&self) -> Vec<T> {
        self.blocks.iter().flat_map(|b| b.w.iter().copied()).collect()
    }

    pub fn set_weights(&mut self, values: &[T]) -> Result<()> {
        check_len(self.param_count(), values.len())?;
        let recache = self.has_cached_spectra();
        for (block, chunk) in self.blocks.iter_mut().zip(values.chunks_exact(self.k)) {
            block.w.copy_from_slice(chunk);
            block.cached_spectrum = None;
        }
        if recache {
            self.cache_spectra();
        }
        Ok(())
    }

    /// Stored value at flat index `index`.
    pub fn value(&self, index: usize) -> T {
        self.blocks[index / self.k].w[index % self.k]
    }

    /// Overwrites one stored value, refreshing only that block's spectrum.
    pub fn set_value(&mut self, index: usize, value: T) -> Result<()> {
        if index >= self.param_count() {
            return Err(Error::InvalidShape(format!("index {index} outside {} parameters", self.param_count())));
        }
        let block = &mut self.blocks[index / self.k];
        block.w[index % self.k] = value;
        if block.cached_spectrum.is_some() {
            let mut ops = OpCounter::new();
            block.cached_spectrum = Some(self.kernel.spectrum(&block.w, &mut ops));
        }
        Ok(())
    }

    /// Applies `f(flat_index, &mut value)` to every stored value, then drops
    /// stale spectra (recomputing them if they were cached).
    pub fn update_weights(&mut self, mut f: impl FnMut(usize, &mut T)) {
        let recache = self.has_cached_spectra();
        let k = self.k;
        for (b, block) in self.blocks.iter_mut().enumerate() {
            for (t, v) in block.w.iter_mut().enumerate() {
                f(b * k + t, v);
            }
            block.cached_spectrum = None;
        }
        if recache {
            self.cache_spectra();
        }
    }

    pub fn has_cached_spectra(&self) -> bool {
        self.blocks.iter().all(|b| b.cached_spectrum.is_some())
    }

    /// Precomputes every block spectrum; later products reuse them.
    pub fn cache_spectra(&mut self) {
        let mut ops = OpCounter::new();
        for block in &mut self.blocks {
            block.cached_spectrum = Some(self.kernel.spectrum(&block.w, &mut ops));
        }
    }

    pub fn clear_spectra(&mut self) {
        for block in &mut self.blocks {
            block.cached_spectrum = None;
        }
    }

    /// Spectrum of block `(i, j)`, from the cache when present.
    pub fn block_spectrum(&self, i: usize, j: usize, ops: &mut OpCounter) -> Cow<'_, Spectrum<T>> {
        let block = self.block(i, j);
        match &block.cached_spectrum {
            Some(s) => Cow::Borrowed(s),
            None => Cow::Owned(self.kernel.spectrum(&block.w, ops)),
        }
    }

    /// Spectra of the `count` length-`k` segments of `v`, zero-padding the tail.
    pub fn segment_spectra(&self, v: &[T], count: usize, ops: &mut OpCounter) -> Vec<Spectrum<T>> {
        let k = self.k;
        let mut segment = vec![T::zero(); k];
        (0..count)
            .map(|j| {
                let start = (j * k).min(v.len());
                let end = ((j + 1) * k).min(v.len());
                segment.fill(T::zero());
                segment[..end - start].copy_from_slice(&v[start..end]);
                self.kernel.spectrum(&segment, ops)
            })
            .collect()
    }

    pub fn matvec(&self, x: &[T]) -> Result<Vec<T>> {
        self.matvec_counted(x, &mut OpCounter::new())
    }

    /// `W·x`: one forward transform per input segment, products summed in the
    /// frequency domain, one inverse transform per output segment.
    pub fn matvec_counted(&self, x: &[T], ops: &mut OpCounter) -> Result<Vec<T>> {
        check_len(self.cols, x.len())?;
        let xs = self.segment_spectra(x, self.q, ops);
        Ok(self.matvec_spectra(&xs, ops))
    }

    /// `W·x` given the input segment spectra.
    pub fn matvec_spectra(&self, xs: &[Spectrum<T>], ops: &mut OpCounter) -> Vec<T> {
        debug_assert_eq!(xs.len(), self.q);
        let mut out = Vec::with_capacity(self.p * self.k);
        for i in 0..self.p {
            let mut acc = Spectrum::zeros(self.kernel.len);
            for (j, xj) in xs.iter().enumerate() {
                acc.mul_acc(&self.block_spectrum(i, j, ops), xj, ops);
            }
            out.extend(self.kernel.finish(&acc, ops));
        }
        out.truncate(self.rows);
        out
    }

    pub fn matvec_transposed(&self, y: &[T]) -> Result<Vec<T>> {
        self.matvec_transposed_counted(y, &mut OpCounter::new())
    }

    /// `Wᵀ·y`; each transposed block is the circulant of the reversed vector.
    pub fn matvec_transposed_counted(&self, y: &[T], ops: &mut OpCounter) -> Result<Vec<T>> {
        check_len(self.rows, y.len())?;
        let ys = self.segment_spectra(y, self.p, ops);
        Ok(self.matvec_transposed_spectra(&ys, ops))
    }

    pub fn matvec_transposed_spectra(&self, ys: &[Spectrum<T>], ops: &mut OpCounter) -> Vec<T> {
        debug_assert_eq!(ys.len(), self.p);
        let reversed = self.reversed_block_spectra(ops);
        let mut out = Vec::with_capacity(self.q * self.k);
        for j in 0..self.q {
            let mut acc = Spectrum::zeros(self.kernel.len);
            for (i, yi) in ys.iter().enumerate() {
                acc.mul_acc(&reversed[i * self.q + j], yi, ops);
            }
            out.extend(self.kernel.finish(&acc, ops));
        }
        out.truncate(self.cols);
        out
    }

    fn reversed_block_spectra(&self, ops: &mut OpCounter) -> Vec<Spectrum<T>> {
        (0..self.p)
            .flat_map(|i| (0..self.q).map(move |j| (i, j)))
            .map(|(i, j)| {
                let spec = self.block_spectrum(i, j, ops);
                self.kernel.reversed_spectrum(&self.block(i, j).w, &spec, ops)
            })
            .collect()
    }

    /// Gradient of `<g, W·x>` with respect to every stored value:
    /// `dw_ij = g_i ⊛ x'_j` (`x'` the circular reversal).
    pub fn weight_gradient(&self, grad_out: &[T], x: &[T], ops: &mut OpCounter) -> Result<Vec<T>> {
        check_len(self.rows, grad_out.len())?;
        check_len(self.cols, x.len())?;
        let gs = self.segment_spectra(grad_out, self.p, ops);
        let xs = self.reversed_segment_spectra(x, self.q, ops);
        Ok(self.outer_finish(&gs, &xs, ops))
    }

    /// Gradient of `<g, Wᵀ·x>` with respect to every stored value:
    /// `dw_ij = x_i ⊛ g'_j`.
    pub fn weight_gradient_transposed(&self, grad_out: &[T], x: &[T], ops: &mut OpCounter) -> Result<Vec<T>> {
        check_len(self.cols, grad_out.len())?;
        check_len(self.rows, x.len())?;
        let xs = self.segment_spectra(x, self.p, ops);
        let gs = self.reversed_segment_spectra(grad_out, self.q, ops);
        Ok(self.outer_finish(&xs, &gs, ops))
    }

    /// Reversed-segment spectra of `v`, split into `count` segments.
    pub fn reversed_segment_spectra(&self, v: &[T], count: usize, ops: &mut OpCounter) -> Vec<Spectrum<T>> {
        let k = self.k;
        let plain = self.segment_spectra(v, count, ops);
        plain
            .iter()
            .enumerate()
            .map(|(j, s)| {
                if self.kernel.embedded() {
                    let mut seg = vec![T::zero(); k];
                    let start = (j * k).min(v.len());
                    let end = ((j + 1) * k).min(v.len());
                    seg[..end - start].copy_from_slice(&v[start..end]);
                    self.kernel.reversed_spectrum(&seg, s, ops)
                } else {
                    s.conj()
                }
            })
            .collect()
    }

    /// `out[i·q + j] = finish(left_i ∘ right_j)`, flattened.
    pub fn outer_finish(&self, left: &[Spectrum<T>], right: &[Spectrum<T>], ops: &mut OpCounter) -> Vec<T> {
        let mut out = Vec::with_capacity(self.param_count());
        for l in left {
            for r in right {
                let mut acc = Spectrum::zeros(self.kernel.len);
                acc.mul_acc(l, r, ops);
                out.extend(self.kernel.finish(&acc, ops));
            }
        }
        out
    }

    /// Logical `m×n` dense matrix, entry `(u, v)` of block `(i, j)` being
    /// `w_ij[(u - v) mod k]`.
    pub fn dense_expand(&self) -> DenseMatrix<T> {
        let k = self.k;
        let mut dense = DenseMatrix::zeros(self.rows, self.cols);
        for r in 0..self.rows {
            for c in 0..self.cols {
                let w = &self.block(r / k, c / k).w;
                dense.entries[r * self.cols + c] = w[(r % k + k - c % k) % k];
            }
        }
        dense
    }
}
