//! Block-circulant weight matrices with FFT-based products, the layers and
//! training loop built on them, fixed-point storage and model files.
//!
//! Everything numeric is generic over [`Scalar`] (`f32` or `f64`); the
//! `*64`/`*32` aliases below name the concrete instantiations.

pub mod arch;
pub mod circulant;
pub mod dataset;
pub mod error;
pub mod fft;
pub mod layers;
pub mod model_file;
pub mod network;
pub mod quantize;
pub mod scalar;
pub mod training;

pub use arch::{LayerSpec, NetworkSpec};
pub use circulant::{circ_matvec_dense, circ_matvec_fft, circular_reverse, BlockCirculantMatrix, CirculantBlock, CirculantKernel, DenseMatrix};
pub use dataset::{load_mnist, load_mnist_dir, synth_dataset, Dataset};
pub use error::{Error, Result};
pub use fft::{plan, spectrum_mul, spectrum_mul_counted, FftPlan, OpCounter, Spectrum, MAX_FFT_SIZE};
pub use layers::{im2col, maxpool_backward, maxpool_forward, softmax_xent, Activation, ConvLayer, FcLayer, LayerGradients, Tensor};
pub use model_file::{load_model, save_model, ModelFile};
pub use network::{argmax, init_network, Network, SampleGradients, Stage};
pub use quantize::{compression_report, dequantize, quantize, quantize_network, quantized_inference, CompressionReport, FixedPointTensor};
pub use scalar::{Precision, Scalar};
pub use training::{evaluate, grad_check, train, EpochRecord, GradCheckReport, TrainConfig, TrainReport};

pub type FftPlan64 = FftPlan<f64>;
pub type FftPlan32 = FftPlan<f32>;
pub type Spectrum64 = Spectrum<f64>;
pub type Spectrum32 = Spectrum<f32>;
pub type BlockCirculantMatrix64 = BlockCirculantMatrix<f64>;
pub type BlockCirculantMatrix32 = BlockCirculantMatrix<f32>;
pub type Network64 = Network<f64>;
pub type Network32 = Network<f32>;
pub type Dataset64 = Dataset<f64>;
pub type Dataset32 = Dataset<f32>;
