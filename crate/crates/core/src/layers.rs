//! Fully-connected and convolutional layers with block-circulant weights,
//! plus max pooling and the softmax cross-entropy loss.

use crate::circulant::{BlockCirculantMatrix, DenseMatrix};
use crate::error::{check_len, Error, Result};
use crate::fft::{OpCounter, Spectrum};
use crate::scalar::Scalar;

/// Dense row-major tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<T> {
    shape: Vec<usize>,
    data: Vec<T>,
}

impl<T: Scalar> Tensor<T> {
    pub fn new(shape: Vec<usize>, data: Vec<T>) -> Result<Self> {
        if shape.iter().product::<usize>() != data.len() || shape.contains(&0) {
            return Err(Error::InvalidShape(format!("shape {shape:?} for {} values", data.len())));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let len = shape.iter().product();
        Self { shape, data: vec![T::zero(); len] }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Activation {
    #[default]
    Relu,
    Identity,
}

impl Activation {
    #[inline]
    pub fn apply<T: Scalar>(self, x: T) -> T {
        match self {
            Activation::Relu => x.max(T::zero()),
            Activation::Identity => x,
        }
    }

    /// ReLU'(0) = 0.
    #[inline]
    pub fn derivative<T: Scalar>(self, x: T) -> T {
        match self {
            Activation::Relu if x > T::zero() => T::one(),
            Activation::Relu => T::zero(),
            Activation::Identity => T::one(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Identity => "identity",
        }
    }
}

impl std::str::FromStr for Activation {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "relu" => Ok(Activation::Relu),
            "identity" | "none" | "linear" => Ok(Activation::Identity),
            other => Err(format!("unknown activation `{other}`")),
        }
    }
}

/// Gradients produced by one layer's backward pass.
///
/// `d_weights` follows the layer's stored-parameter order.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerGradients<T> {
    pub d_weights: Vec<T>,
    pub d_bias: Vec<T>,
    pub d_input: Vec<T>,
}

/// `y = ψ(W·x + θ)` with a block-circulant `W`.
#[derive(Debug, Clone)]
pub struct FcLayer<T> {
    weights: BlockCirculantMatrix<T>,
    bias: Vec<T>,
    activation: Activation,
}

impl<T: Scalar> FcLayer<T> {
    pub fn new(weights: BlockCirculantMatrix<T>, bias: Vec<T>, activation: Activation) -> Result<Self> {
        check_len(weights.rows(), bias.len())?;
        Ok(Self { weights, bias, activation })
    }

    pub fn inputs(&self) -> usize {
        self.weights.cols()
    }

    pub fn outputs(&self) -> usize {
        self.weights.rows()
    }

    pub fn weights(&self) -> &BlockCirculantMatrix<T> {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut BlockCirculantMatrix<T> {
        &mut self.weights
    }

    pub fn bias(&self) -> &[T] {
        &self.bias
    }

    pub fn bias_mut(&mut self) -> &mut [T] {
        &mut self.bias
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    /// Returns `(a_pre, y)`; `a_pre` is kept for the backward pass.
    pub fn forward(&self, x: &[T], ops: &mut OpCounter) -> Result<(Vec<T>, Vec<T>)> {
        let mut a_pre = self.weights.matvec_counted(x, ops)?;
        for (a, &b) in a_pre.iter_mut().zip(&self.bias) {
            *a += b;
        }
        ops.real_adds += a_pre.len() as u64;
        let y = a_pre.iter().map(|&a| self.activation.apply(a)).collect();
        Ok((a_pre, y))
    }

    /// Spectral backward pass: `dw_ij = g_i ⊛ x'_j` and `dx_j = Σ_i g_i ⊛ w'_ij`.
    pub fn backward(&self, x: &[T], a_pre: &[T], dl_dy: &[T], ops: &mut OpCounter) -> Result<LayerGradients<T>> {
        check_len(self.inputs(), x.len())?;
        check_len(self.outputs(), a_pre.len())?;
        check_len(self.outputs(), dl_dy.len())?;
        let g: Vec<T> = dl_dy
            .iter()
            .zip(a_pre)
            .map(|(&d, &a)| d * self.activation.derivative(a))
            .collect();
        let gs = self.weights.segment_spectra(&g, self.weights.block_rows(), ops);
        let xs_rev = self.weights.reversed_segment_spectra(x, self.weights.block_cols(), ops);
        let d_weights = self.weights.outer_finish(&gs, &xs_rev, ops);
        let d_input = self.weights.matvec_transposed_spectra(&gs, ops);
        Ok(LayerGradients { d_weights, d_bias: g, d_input })
    }
}

/// Stride-1 valid convolution whose per-offset channel maps are block-circulant.
///
/// For kernel offset `(i, j)` the `C×P` matrix `F_ij` holds `F(i, j, c, p)`;
/// the output pixel is `Σ_ij F_ijᵀ · X(x+i, y+j, :)`.
#[derive(Debug, Clone)]
pub struct ConvLayer<T> {
    r: usize,
    in_channels: usize,
    out_channels: usize,
    kernels: Vec<BlockCirculantMatrix<T>>,
    bias: Vec<T>,
    activation: Activation,
}

impl<T: Scalar> ConvLayer<T> {
    /// `kernels` are the `r²` offset matrices in `i·r + j` order.
    pub fn new(r: usize, kernels: Vec<BlockCirculantMatrix<T>>, bias: Vec<T>, activation: Activation) -> Result<Self> {
        if r == 0 || kernels.len() != r * r {
            return Err(Error::InvalidShape(format!("{} kernel matrices for r = {r}", kernels.len())));
        }
        let (c, p, k) = (kernels[0].rows(), kernels[0].cols(), kernels[0].block_size());
        if kernels.iter().any(|f| f.rows() != c || f.cols() != p || f.block_size() != k) {
            return Err(Error::InvalidShape("kernel matrices disagree on shape or block size".into()));
        }
        if c % k != 0 || p % k != 0 {
            return Err(Error::InvalidShape(format!("block size {k} must divide channels {c} and {p}")));
        }
        check_len(p, bias.len())?;
        Ok(Self { r, in_channels: c, out_channels: p, kernels, bias, activation })
    }

    pub fn kernel_size(&self) -> usize {
        self.r
    }

    pub fn in_channels(&self) -> usize {
        self.in_channels
    }

    pub fn out_channels(&self) -> usize {
        self.out_channels
    }

    pub fn block_size(&self) -> usize {
        self.kernels[0].block_size()
    }

    pub fn kernels(&self) -> &[BlockCirculantMatrix<T>] {
        &self.kernels
    }

    pub fn kernels_mut(&mut self) -> &mut [BlockCirculantMatrix<T>] {
        &mut self.kernels
    }

    pub fn bias(&self) -> &[T] {
        &self.bias
    }

    pub fn bias_mut(&mut self) -> &mut [T] {
        &mut self.bias
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn param_count(&self) -> usize {
        self.kernels.iter().map(|f| f.param_count()).sum()
    }

    pub fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        match *input {
            [w, h, c] if c == self.in_channels && w >= self.r && h >= self.r => {
                Ok(vec![w - self.r + 1, h - self.r + 1, self.out_channels])
            }
            _ => Err(Error::InvalidShape(format!(
                "conv r={} C={} cannot take input {input:?}",
                self.r, self.in_channels
            ))),
        }
    }

    /// The `Cr²×P` matrix of the im2col formulation, rows ordered `c + C·i + C·r·j`.
    pub fn weight_matrix(&self) -> DenseMatrix<T> {
        let (c_in, r) = (self.in_channels, self.r);
        let mut out = DenseMatrix::zeros(c_in * r * r, self.out_channels);
        for i in 0..r {
            for j in 0..r {
                let dense = self.kernels[i * r + j].dense_expand();
                for c in 0..c_in {
                    for p in 0..self.out_channels {
                        out.entries[(c + c_in * i + c_in * r * j) * self.out_channels + p] = dense.get(c, p);
                    }
                }
            }
        }
        out
    }

    /// Returns `(a_pre, y)` as `(W-r+1)×(H-r+1)×P` tensors.
    pub fn forward(&self, x: &Tensor<T>, ops: &mut OpCounter) -> Result<(Tensor<T>, Tensor<T>)> {
        let out_shape = self.output_shape(x.shape())?;
        let (w_in, h_in) = (x.shape()[0], x.shape()[1]);
        let (w_out, h_out) = (out_shape[0], out_shape[1]);
        let k = self.block_size();
        let (nb_in, nb_out) = (self.in_channels / k, self.out_channels / k);
        let template = &self.kernels[0];
        let len = template.kernel().transform_len();

        let pixel_spectra: Vec<Vec<Spectrum<T>>> = x
            .data()
            .chunks_exact(self.in_channels)
            .map(|channels| template.segment_spectra(channels, nb_in, ops))
            .collect();
        // Transposed blocks, indexed [offset][a * nb_out + b].
        let kernel_spectra: Vec<Vec<Spectrum<T>>> = self
            .kernels
            .iter()
            .map(|f| {
                (0..nb_in * nb_out)
                    .map(|idx| {
                        let (a, b) = (idx / nb_out, idx % nb_out);
                        let spec = f.block_spectrum(a, b, ops);
                        f.kernel().reversed_spectrum(f.block(a, b).weights(), &spec, ops)
                    })
                    .collect()
            })
            .collect();

        let mut a_pre = Vec::with_capacity(w_out * h_out * self.out_channels);
        for px in 0..w_out {
            for py in 0..h_out {
                for b in 0..nb_out {
                    let mut acc = Spectrum::zeros(len);
                    for i in 0..self.r {
                        for j in 0..self.r {
                            let input = &pixel_spectra[(px + i) * h_in + (py + j)];
                            let blocks = &kernel_spectra[i * self.r + j];
                            for (a, xa) in input.iter().enumerate() {
                                acc.mul_acc(&blocks[a * nb_out + b], xa, ops);
                            }
                        }
                    }
                    let seg = template.kernel().finish(&acc, ops);
                    a_pre.extend(seg.iter().zip(&self.bias[b * k..(b + 1) * k]).map(|(&v, &bias)| v + bias));
                }
            }
        }
        ops.real_adds += a_pre.len() as u64;
        let _ = w_in;
        let y = a_pre.iter().map(|&v| self.activation.apply(v)).collect();
        Ok((Tensor::new(out_shape.clone(), a_pre)?, Tensor::new(out_shape, y)?))
    }

    /// Gradients for every kernel vector, the bias and the input.
    ///
    /// Weight gradients are accumulated in the frequency domain over all
    /// output pixels before a single inverse transform per block.
    pub fn backward(&self, x: &Tensor<T>, a_pre: &Tensor<T>, dl_dy: &Tensor<T>, ops: &mut OpCounter) -> Result<LayerGradients<T>> {
        let out_shape = self.output_shape(x.shape())?;
        if a_pre.shape() != out_shape.as_slice() || dl_dy.shape() != out_shape.as_slice() {
            return Err(Error::InvalidShape(format!(
                "upstream gradient {:?} does not match output {out_shape:?}",
                dl_dy.shape()
            )));
        }
        let (w_in, h_in) = (x.shape()[0], x.shape()[1]);
        let (w_out, h_out) = (out_shape[0], out_shape[1]);
        let k = self.block_size();
        let (nb_in, nb_out) = (self.in_channels / k, self.out_channels / k);
        let template = &self.kernels[0];
        let kernel = template.kernel();
        let len = kernel.transform_len();

        let g: Vec<T> = dl_dy
            .data()
            .iter()
            .zip(a_pre.data())
            .map(|(&d, &a)| d * self.activation.derivative(a))
            .collect();
        let mut d_bias = vec![T::zero(); self.out_channels];
        for pixel in g.chunks_exact(self.out_channels) {
            for (db, &v) in d_bias.iter_mut().zip(pixel) {
                *db += v;
            }
        }

        let pixel_spectra: Vec<Vec<Spectrum<T>>> = x
            .data()
            .chunks_exact(self.in_channels)
            .map(|channels| template.segment_spectra(channels, nb_in, ops))
            .collect();
        let grad_spectra: Vec<Vec<Spectrum<T>>> = g
            .chunks_exact(self.out_channels)
            .map(|channels| template.segment_spectra(channels, nb_out, ops))
            .collect();
        let grad_reversed: Vec<Vec<Spectrum<T>>> = g
            .chunks_exact(self.out_channels)
            .map(|channels| template.reversed_segment_spectra(channels, nb_out, ops))
            .collect();
        let kernel_spectra: Vec<Vec<Spectrum<T>>> = self
            .kernels
            .iter()
            .map(|f| {
                (0..nb_in * nb_out)
                    .map(|idx| f.block_spectrum(idx / nb_out, idx % nb_out, ops).into_owned())
                    .collect()
            })
            .collect();

        let offsets = self.r * self.r;
        let mut weight_acc = vec![Spectrum::zeros(len); offsets * nb_in * nb_out];
        let mut input_acc = vec![Spectrum::zeros(len); w_in * h_in * nb_in];
        for px in 0..w_out {
            for py in 0..h_out {
                let out_px = px * h_out + py;
                for i in 0..self.r {
                    for j in 0..self.r {
                        let off = i * self.r + j;
                        let in_px = (px + i) * h_in + (py + j);
                        for a in 0..nb_in {
                            for b in 0..nb_out {
                                let blk = (off * nb_in + a) * nb_out + b;
                                weight_acc[blk].mul_acc(
                                    &pixel_spectra[in_px][a],
                                    &grad_reversed[out_px][b],
                                    ops,
                                );
                                input_acc[in_px * nb_in + a].mul_acc(
                                    &kernel_spectra[off][a * nb_out + b],
                                    &grad_spectra[out_px][b],
                                    ops,
                                );
                            }
                        }
                    }
                }
            }
        }

        let d_weights: Vec<T> = weight_acc.iter().flat_map(|s| kernel.finish(s, ops)).collect();
        let d_input: Vec<T> = input_acc.iter().flat_map(|s| kernel.finish(s, ops)).collect();
        Ok(LayerGradients { d_weights, d_bias, d_input })
    }
}

/// im2col rearrangement: row `x·(H-r+1) + y` holds the patch at `(x, y)`,
/// column `c + C·i + C·r·j` holding `X(x+i, y+j, c)`.
pub fn im2col<T: Scalar>(x: &Tensor<T>, r: usize) -> Result<DenseMatrix<T>> {
    let (w, h, c) = match *x.shape() {
        [w, h, c] => (w, h, c),
        _ => return Err(Error::InvalidShape(format!("im2col expects W×H×C, got {:?}", x.shape()))),
    };
    if r == 0 || r > w || r > h {
        return Err(Error::InvalidShape(format!("kernel {r} larger than input {w}×{h}")));
    }
    let (wo, ho) = (w - r + 1, h - r + 1);
    let cols = c * r * r;
    let mut out = DenseMatrix::zeros(wo * ho, cols);
    for px in 0..wo {
        for py in 0..ho {
            let row = px * ho + py;
            for i in 0..r {
                for j in 0..r {
                    for ch in 0..c {
                        out.entries[row * cols + ch + c * i + c * r * j] = x.data()[((px + i) * h + py + j) * c + ch];
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Non-overlapping max pooling; returns the pooled tensor and, per output
/// element, the flat input index that won. Ties go to the first element in
/// row-major scan order.
pub fn maxpool_forward<T: Scalar>(x: &Tensor<T>, window: usize) -> Result<(Tensor<T>, Vec<usize>)> {
    let (w, h, c) = match *x.shape() {
        [w, h, c] => (w, h, c),
        _ => return Err(Error::InvalidShape(format!("max pooling expects W×H×C, got {:?}", x.shape()))),
    };
    if window == 0 || w % window != 0 || h % window != 0 {
        return Err(Error::InvalidShape(format!("{w}×{h} not divisible by window {window}")));
    }
    let (wo, ho) = (w / window, h / window);
    let mut values = Vec::with_capacity(wo * ho * c);
    let mut argmax = Vec::with_capacity(wo * ho * c);
    for px in 0..wo {
        for py in 0..ho {
            for ch in 0..c {
                let mut best = ((px * window) * h + py * window) * c + ch;
                for dx in 0..window {
                    for dy in 0..window {
                        let idx = ((px * window + dx) * h + py * window + dy) * c + ch;
                        if x.data()[idx] > x.data()[best] {
                            best = idx;
                        }
                    }
                }
                values.push(x.data()[best]);
                argmax.push(best);
            }
        }
    }
    Ok((Tensor::new(vec![wo, ho, c], values)?, argmax))
}

/// Routes each output gradient to the input position recorded in `argmax`.
pub fn maxpool_backward<T: Scalar>(argmax: &[usize], dl_dy: &[T], input_len: usize) -> Result<Vec<T>> {
    check_len(argmax.len(), dl_dy.len())?;
    let mut dx = vec![T::zero(); input_len];
    for (&idx, &g) in argmax.iter().zip(dl_dy) {
        if idx >= input_len {
            return Err(Error::InvalidShape(format!("argmax index {idx} outside input of {input_len}")));
        }
        dx[idx] += g;
    }
    Ok(dx)
}

/// Log-sum-exp stabilized cross-entropy; gradient is `softmax - onehot`.
pub fn softmax_xent<T: Scalar>(logits: &[T], label: usize) -> Result<(T, Vec<T>)> {
    if logits.len() < 2 {
        return Err(Error::InvalidShape(format!("softmax over {} classes", logits.len())));
    }
    if label >= logits.len() {
        return Err(Error::LabelOutOfRange { label, classes: logits.len() });
    }
    let max = logits.iter().copied().fold(T::neg_infinity(), T::max);
    let exps: Vec<T> = logits.iter().map(|&v| (v - max).exp()).collect();
    let total: T = exps.iter().copied().sum();
    let loss = total.ln() - (logits[label] - max);
    let mut grad: Vec<T> = exps.into_iter().map(|e| e / total).collect();
    grad[label] -= T::one();
    Ok((loss, grad))
}
