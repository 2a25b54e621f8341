//! Layer stacks with a softmax cross-entropy head.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::arch::{LayerSpec, NetworkSpec};
use crate::circulant::BlockCirculantMatrix;
use crate::error::{check_len, Error, Result};
use crate::fft::OpCounter;
use crate::layers::{maxpool_backward, maxpool_forward, softmax_xent, ConvLayer, FcLayer, Tensor};
use crate::scalar::Scalar;

#[derive(Debug, Clone)]
pub enum Stage<T> {
    Fc(FcLayer<T>),
    Conv(ConvLayer<T>),
    MaxPool { window: usize },
}

impl<T: Scalar> Stage<T> {
    /// Stored weight values followed by bias values.
    pub fn param_count(&self) -> usize {
        match self {
            Stage::Fc(l) => l.weights().param_count() + l.bias().len(),
            Stage::Conv(l) => l.param_count() + l.bias().len(),
            Stage::MaxPool { .. } => 0,
        }
    }

    fn weight_count(&self) -> usize {
        match self {
            Stage::Fc(l) => l.weights().param_count(),
            Stage::Conv(l) => l.param_count(),
            Stage::MaxPool { .. } => 0,
        }
    }

    fn params_into(&self, out: &mut Vec<T>) {
        match self {
            Stage::Fc(l) => {
                out.extend(l.weights().weights());
                out.extend_from_slice(l.bias());
            }
            Stage::Conv(l) => {
                for f in l.kernels() {
                    out.extend(f.weights());
                }
                out.extend_from_slice(l.bias());
            }
            Stage::MaxPool { .. } => {}
        }
    }

    fn set_params(&mut self, values: &[T]) -> Result<()> {
        check_len(self.param_count(), values.len())?;
        let (weights, bias) = values.split_at(self.weight_count());
        match self {
            Stage::Fc(l) => {
                l.weights_mut().set_weights(weights)?;
                l.bias_mut().copy_from_slice(bias);
            }
            Stage::Conv(l) => {
                let per = l.kernels()[0].param_count();
                for (f, chunk) in l.kernels_mut().iter_mut().zip(weights.chunks_exact(per)) {
                    f.set_weights(chunk)?;
                }
                l.bias_mut().copy_from_slice(bias);
            }
            Stage::MaxPool { .. } => {}
        }
        Ok(())
    }

    fn param(&self, index: usize) -> T {
        let nw = self.weight_count();
        match self {
            Stage::Fc(l) if index < nw => l.weights().value(index),
            Stage::Fc(l) => l.bias()[index - nw],
            Stage::Conv(l) if index < nw => {
                let per = l.kernels()[0].param_count();
                l.kernels()[index / per].value(index % per)
            }
            Stage::Conv(l) => l.bias()[index - nw],
            Stage::MaxPool { .. } => unreachable!("pooling has no parameters"),
        }
    }

    fn set_param(&mut self, index: usize, value: T) -> Result<()> {
        let nw = self.weight_count();
        match self {
            Stage::Fc(l) if index < nw => l.weights_mut().set_value(index, value),
            Stage::Fc(l) => {
                l.bias_mut()[index - nw] = value;
                Ok(())
            }
            Stage::Conv(l) if index < nw => {
                let per = l.kernels()[0].param_count();
                l.kernels_mut()[index / per].set_value(index % per, value)
            }
            Stage::Conv(l) => {
                l.bias_mut()[index - nw] = value;
                Ok(())
            }
            Stage::MaxPool { .. } => unreachable!("pooling has no parameters"),
        }
    }

    fn cache_spectra(&mut self) {
        match self {
            Stage::Fc(l) => l.weights_mut().cache_spectra(),
            Stage::Conv(l) => l.kernels_mut().iter_mut().for_each(|f| f.cache_spectra()),
            Stage::MaxPool { .. } => {}
        }
    }
}

/// What the backward pass needs from one stage's forward pass.
#[derive(Debug, Clone)]
enum Saved<T> {
    Fc { input: Vec<T>, a_pre: Vec<T> },
    Conv { input: Tensor<T>, a_pre: Tensor<T> },
    Pool { argmax: Vec<usize>, input_len: usize },
}

/// Loss, logits and gradients for one sample.
#[derive(Debug, Clone)]
pub struct SampleGradients<T> {
    pub loss: T,
    pub logits: Vec<T>,
    /// Flat, in [`Network::parameters`] order.
    pub params: Vec<T>,
    pub input: Vec<T>,
}

#[derive(Debug, Clone)]
pub struct Network<T> {
    spec: NetworkSpec,
    shapes: Vec<Vec<usize>>,
    stages: Vec<Stage<T>>,
}

impl<T: Scalar> Network<T> {
    /// Zero-initialized network.
    pub fn zeros(spec: &NetworkSpec) -> Result<Self> {
        let shapes = spec.shapes()?;
        let mut stages = Vec::with_capacity(spec.layers.len());
        for (layer, input) in spec.layers.iter().zip(&shapes) {
            let stage = match *layer {
                LayerSpec::Fc { outputs, k, activation } => {
                    let n = input.iter().product();
                    Stage::Fc(FcLayer::new(BlockCirculantMatrix::zeros(outputs, n, k)?, vec![T::zero(); outputs], activation)?)
                }
                LayerSpec::Conv { r, out_channels, k, activation } => {
                    let c = input[2];
                    let kernels = (0..r * r)
                        .map(|_| BlockCirculantMatrix::zeros(c, out_channels, k))
                        .collect::<Result<Vec<_>>>()?;
                    Stage::Conv(ConvLayer::new(r, kernels, vec![T::zero(); out_channels], activation)?)
                }
                LayerSpec::MaxPool { window } => Stage::MaxPool { window },
            };
            stages.push(stage);
        }
        let mut net = Self { spec: spec.clone(), shapes, stages };
        net.stages.iter_mut().for_each(Stage::cache_spectra);
        Ok(net)
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn stages(&self) -> &[Stage<T>] {
        &self.stages
    }

    pub fn input_len(&self) -> usize {
        self.spec.input_len()
    }

    pub fn classes(&self) -> usize {
        self.shapes.last().map_or(0, |s| s[0])
    }

    pub fn param_count(&self) -> usize {
        self.stages.iter().map(Stage::param_count).sum()
    }

    /// Per stage: weights (block-row-major, CONV offsets in `i·r + j` order), then biases.
    pub fn parameters(&self) -> Vec<T> {
        let mut out = Vec::with_capacity(self.param_count());
        for stage in &self.stages {
            stage.params_into(&mut out);
        }
        out
    }

    pub fn set_parameters(&mut self, values: &[T]) -> Result<()> {
        check_len(self.param_count(), values.len())?;
        let mut rest = values;
        for stage in &mut self.stages {
            let (head, tail) = rest.split_at(stage.param_count());
            stage.set_params(head)?;
            rest = tail;
        }
        Ok(())
    }

    fn locate(&self, mut index: usize) -> Option<(usize, usize)> {
        for (s, stage) in self.stages.iter().enumerate() {
            let n = stage.param_count();
            if index < n {
                return Some((s, index));
            }
            index -= n;
        }
        None
    }

    pub fn parameter(&self, index: usize) -> Option<T> {
        self.locate(index).map(|(s, i)| self.stages[s].param(i))
    }

    /// Changes one parameter, refreshing only the affected spectrum.
    pub fn set_parameter(&mut self, index: usize, value: T) -> Result<()> {
        let (s, i) = self
            .locate(index)
            .ok_or_else(|| Error::InvalidShape(format!("parameter {index} of {}", self.param_count())))?;
        self.stages[s].set_param(i, value)
    }

    /// `θ ← θ − lr·g` over the flat parameter vector.
    pub fn sgd_step(&mut self, grads: &[T], lr: T) -> Result<()> {
        let mut params = self.parameters();
        check_len(params.len(), grads.len())?;
        for (p, &g) in params.iter_mut().zip(grads) {
            *p -= lr * g;
        }
        self.set_parameters(&params)
    }

    fn run(&self, x: &[T], save: bool, ops: &mut OpCounter) -> Result<(Vec<T>, Vec<Saved<T>>)> {
        check_len(self.input_len(), x.len())?;
        let mut cur = x.to_vec();
        let mut saved = Vec::with_capacity(if save { self.stages.len() } else { 0 });
        for (stage, shape) in self.stages.iter().zip(&self.shapes) {
            cur = match stage {
                Stage::Fc(l) => {
                    let (a_pre, y) = l.forward(&cur, ops)?;
                    if save {
                        saved.push(Saved::Fc { input: cur, a_pre });
                    }
                    y
                }
                Stage::Conv(l) => {
                    let input = Tensor::new(shape.clone(), cur)?;
                    let (a_pre, y) = l.forward(&input, ops)?;
                    if save {
                        saved.push(Saved::Conv { input, a_pre });
                    }
                    y.into_data()
                }
                Stage::MaxPool { window } => {
                    let input_len = cur.len();
                    let (y, argmax) = maxpool_forward(&Tensor::new(shape.clone(), cur)?, *window)?;
                    if save {
                        saved.push(Saved::Pool { argmax, input_len });
                    }
                    y.into_data()
                }
            };
        }
        Ok((cur, saved))
    }

    pub fn forward(&self, x: &[T]) -> Result<Vec<T>> {
        self.forward_counted(x, &mut OpCounter::new())
    }

    pub fn forward_counted(&self, x: &[T], ops: &mut OpCounter) -> Result<Vec<T>> {
        Ok(self.run(x, false, ops)?.0)
    }

    pub fn loss(&self, x: &[T], label: usize) -> Result<T> {
        let logits = self.forward(x)?;
        Ok(softmax_xent(&logits, label)?.0)
    }

    /// Index of the largest logit, ties toward the lowest class.
    pub fn predict(&self, x: &[T]) -> Result<usize> {
        Ok(argmax(&self.forward(x)?))
    }

    pub fn gradients(&self, x: &[T], label: usize, ops: &mut OpCounter) -> Result<SampleGradients<T>> {
        let (logits, saved) = self.run(x, true, ops)?;
        let (loss, mut upstream) = softmax_xent(&logits, label)?;
        let mut per_stage: Vec<Vec<T>> = vec![Vec::new(); self.stages.len()];
        for (s, (stage, cache)) in self.stages.iter().zip(&saved).enumerate().rev() {
            upstream = match (stage, cache) {
                (Stage::Fc(l), Saved::Fc { input, a_pre }) => {
                    let g = l.backward(input, a_pre, &upstream, ops)?;
                    per_stage[s] = [g.d_weights, g.d_bias].concat();
                    g.d_input
                }
                (Stage::Conv(l), Saved::Conv { input, a_pre }) => {
                    let dy = Tensor::new(a_pre.shape().to_vec(), upstream)?;
                    let g = l.backward(input, a_pre, &dy, ops)?;
                    per_stage[s] = [g.d_weights, g.d_bias].concat();
                    g.d_input
                }
                (Stage::MaxPool { .. }, Saved::Pool { argmax, input_len }) => maxpool_backward(argmax, &upstream, *input_len)?,
                _ => unreachable!("forward saves one entry per stage"),
            };
        }
        Ok(SampleGradients { loss, logits, params: per_stage.concat(), input: upstream })
    }

    /// Copy in another precision.
    pub fn cast<U: Scalar>(&self) -> Result<Network<U>> {
        let mut out = Network::<U>::zeros(&self.spec)?;
        let values: Vec<U> = self.parameters().into_iter().map(|v| U::of(v.widen())).collect();
        out.set_parameters(&values)?;
        Ok(out)
    }
}

/// Index of the largest value; the first one wins ties.
pub fn argmax<T: Scalar>(v: &[T]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Seeded initialization: defining vectors uniform on
/// `±sqrt(6/(fan_in + fan_out))` of the dense-equivalent layer, biases zero.
///
/// FC fans are `n` and `m`; CONV fans are `r²C` and `r²P`.
pub fn init_network<T: Scalar>(spec: &NetworkSpec, seed: u64) -> Result<Network<T>> {
    let mut net = Network::<T>::zeros(spec)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params = Vec::with_capacity(net.param_count());
    for (stage, input) in net.stages.iter().zip(&net.shapes) {
        let (fan_in, fan_out, weights) = match stage {
            Stage::Fc(l) => (input.iter().product::<usize>(), l.outputs(), l.weights().param_count()),
            Stage::Conv(l) => {
                let r2 = l.kernel_size() * l.kernel_size();
                (r2 * l.in_channels(), r2 * l.out_channels(), l.param_count())
            }
            Stage::MaxPool { .. } => continue,
        };
        let half_width = (6.0 / (fan_in + fan_out) as f64).sqrt();
        params.extend((0..weights).map(|_| T::of(rng.random_range(-half_width..half_width))));
        params.extend(std::iter::repeat_n(T::zero(), stage.param_count() - weights));
    }
    net.set_parameters(&params)?;
    Ok(net)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layers::Activation;

    fn small_spec() -> NetworkSpec {
        "input shape=6x6x2\nconv r=3 out=4 k=2\nmaxpool window=2\nfc out=3 k=2 act=identity".parse().unwrap()
    }

    #[test]
    fn init_is_deterministic_and_seed_dependent() {
        let spec = small_spec();
        let a = init_network::<f64>(&spec, 7).unwrap().parameters();
        let b = init_network::<f64>(&spec, 7).unwrap().parameters();
        let c = init_network::<f64>(&spec, 8).unwrap().parameters();
        assert_eq!(a.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), b.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
        assert_ne!(a, c);
    }

    #[test]
    fn init_respects_half_width_and_zero_bias() {
        let spec = NetworkSpec::mlp(64, &[32], 4, 8).unwrap();
        let net = init_network::<f64>(&spec, 1).unwrap();
        let Stage::Fc(first) = &net.stages()[0] else { panic!() };
        let bound = (6.0f64 / 96.0).sqrt();
        let w = first.weights().weights();
        assert!(w.iter().all(|v| v.abs() < bound));
        // Uniform on ±a has variance a²/3.
        let var = w.iter().map(|v| v * v).sum::<f64>() / w.len() as f64;
        assert!((var / (bound * bound / 3.0) - 1.0).abs() < 0.3, "var {var}");
        assert!(first.bias().iter().all(|&b| b == 0.0));
    }

    #[test]
    fn dense_layer_init_width() {
        let spec = NetworkSpec::mlp(50, &[], 10, 1).unwrap();
        let net = init_network::<f64>(&spec, 3).unwrap();
        let bound = (6.0f64 / 60.0).sqrt();
        let w = net.parameters();
        assert_eq!(w.len(), 500 + 10);
        let max = w.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(max < bound && max > 0.9 * bound);
    }

    #[test]
    fn parameters_round_trip_and_single_updates() {
        let spec = small_spec();
        let mut net = init_network::<f64>(&spec, 2).unwrap();
        let x: Vec<f64> = (0..72).map(|i| (i as f64 * 0.37).sin()).collect();
        let before = net.forward(&x).unwrap();
        let params = net.parameters();
        assert_eq!(params.len(), net.param_count());
        net.set_parameters(&params).unwrap();
        assert_eq!(net.forward(&x).unwrap(), before);

        let t = 5;
        net.set_parameter(t, params[t] + 0.25).unwrap();
        assert_eq!(net.parameter(t), Some(params[t] + 0.25));
        let mut fresh = Network::<f64>::zeros(&spec).unwrap();
        fresh.set_parameters(&net.parameters()).unwrap();
        assert_eq!(fresh.forward(&x).unwrap(), net.forward(&x).unwrap());
    }

    #[test]
    fn gradient_shapes_and_predict_ties() {
        let spec = small_spec();
        let net = init_network::<f64>(&spec, 4).unwrap();
        let x = vec![0.1; 72];
        let g = net.gradients(&x, 1, &mut OpCounter::new()).unwrap();
        assert_eq!(g.params.len(), net.param_count());
        assert_eq!(g.input.len(), 72);
        assert!((g.loss - net.loss(&x, 1).unwrap()).abs() < 1e-12);
        assert_eq!(argmax(&[1.0, 3.0, 3.0, 2.0]), 1);
        assert!(matches!(net.gradients(&x, 3, &mut OpCounter::new()), Err(Error::LabelOutOfRange { .. })));
    }

    #[test]
    fn structure_is_fixed_by_spec() {
        let spec = NetworkSpec::new(
            vec![10],
            vec![
                LayerSpec::Fc { outputs: 12, k: 4, activation: Activation::Relu },
                LayerSpec::Fc { outputs: 2, k: 2, activation: Activation::Identity },
            ],
        )
        .unwrap();
        let net = init_network::<f32>(&spec, 0).unwrap();
        // 3×3 blocks of 4, 12 biases, 1×6 blocks of 2, 2 biases.
        assert_eq!(net.param_count(), 36 + 12 + 12 + 2);
        let back = net.cast::<f64>().unwrap().cast::<f32>().unwrap();
        assert_eq!(back.parameters(), net.parameters());
    }
}
