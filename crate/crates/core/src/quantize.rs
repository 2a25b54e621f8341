//! 16-bit fixed-point storage and exact compression accounting.

use std::fmt;
use std::io::Write;

use num_rational::Ratio;

use crate::arch::LayerSpec;
use crate::error::{check_len, Error, Result};
use crate::network::{Network, Stage};
use crate::scalar::Scalar;

pub const MAX_FRAC_BITS: u8 = 15;

/// Values `raw · 2^(−frac_bits)` sharing one binary point.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FixedPointTensor {
    pub shape: Vec<usize>,
    pub raw: Vec<i16>,
    pub frac_bits: u8,
}

impl FixedPointTensor {
    pub fn new(shape: Vec<usize>, raw: Vec<i16>, frac_bits: u8) -> Result<Self> {
        if frac_bits > MAX_FRAC_BITS {
            return Err(Error::InvalidValue(format!("frac_bits {frac_bits} > {MAX_FRAC_BITS}")));
        }
        check_len(shape.iter().product(), raw.len())?;
        Ok(Self { shape, raw, frac_bits })
    }

    /// Half a unit in the last place, the worst-case rounding error.
    pub fn half_ulp(&self) -> f64 {
        0.5 * (-f64::from(self.frac_bits)).exp2()
    }
}

/// Largest `frac_bits ≤ 15` for which the biggest magnitude still rounds
/// into `i16` range; `0` when even that overflows.
pub fn choose_frac_bits(max_abs: f64) -> u8 {
    (0..=MAX_FRAC_BITS)
        .rev()
        .find(|&f| (max_abs * f64::from(f).exp2()).round_ties_even() <= f64::from(i16::MAX))
        .unwrap_or(0)
}

/// Round-to-nearest-even quantization with saturation at the `i16` limits.
pub fn quantize<T: Scalar>(shape: Vec<usize>, values: &[T]) -> Result<FixedPointTensor> {
    check_len(shape.iter().product(), values.len())?;
    if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
        return Err(Error::InvalidValue(format!("cannot quantize {bad}")));
    }
    let max_abs = values.iter().map(|v| v.widen().abs()).fold(0.0, f64::max);
    let frac_bits = choose_frac_bits(max_abs);
    let scale = f64::from(frac_bits).exp2();
    let raw = values
        .iter()
        .map(|v| (v.widen() * scale).round_ties_even().clamp(f64::from(i16::MIN), f64::from(i16::MAX)) as i16)
        .collect();
    Ok(FixedPointTensor { shape, raw, frac_bits })
}

/// Exact: every `i16 · 2^−f` is representable in both `f32` and `f64`.
pub fn dequantize<T: Scalar>(q: &FixedPointTensor) -> Vec<T> {
    let scale = (-f64::from(q.frac_bits)).exp2();
    q.raw.iter().map(|&r| T::of(f64::from(r) * scale)).collect()
}

/// One fixed-point tensor per stored weight tensor and bias, in stage order:
/// FC weights (`p·q·k`) then bias; CONV weights (`r²·p·q·k`) then bias.
pub fn quantize_network<T: Scalar>(net: &Network<T>) -> Result<Vec<FixedPointTensor>> {
    let mut out = Vec::new();
    for stage in net.stages() {
        match stage {
            Stage::Fc(l) => {
                let w = l.weights().weights();
                out.push(quantize(vec![w.len()], &w)?);
                out.push(quantize(vec![l.bias().len()], l.bias())?);
            }
            Stage::Conv(l) => {
                let w: Vec<T> = l.kernels().iter().flat_map(|f| f.weights()).collect();
                out.push(quantize(vec![w.len()], &w)?);
                out.push(quantize(vec![l.bias().len()], l.bias())?);
            }
            Stage::MaxPool { .. } => {}
        }
    }
    Ok(out)
}

/// Copy of `net` whose parameters are the dequantized `tensors`.
pub fn dequantize_network<T: Scalar>(net: &Network<T>, tensors: &[FixedPointTensor]) -> Result<Network<T>> {
    let values: Vec<T> = tensors.iter().flat_map(|t| dequantize::<T>(t)).collect();
    let mut out = net.clone();
    out.set_parameters(&values)?;
    Ok(out)
}

/// Logits from dequantized weights and the largest deviation from the
/// floating-point logits.
pub fn quantized_inference<T: Scalar>(net: &Network<T>, tensors: &[FixedPointTensor], x: &[T]) -> Result<(Vec<T>, f64)> {
    let quantized = dequantize_network(net, tensors)?;
    let logits = quantized.forward(x)?;
    let reference = net.forward(x)?;
    let deviation = logits.iter().zip(&reference).map(|(a, b)| (a.widen() - b.widen()).abs()).fold(0.0, f64::max);
    Ok((logits, deviation))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerCompression {
    pub layer: String,
    pub dense_params: u64,
    pub circ_params: u64,
    pub dense_bytes: Ratio<u64>,
    pub comp_bytes: Ratio<u64>,
}

impl LayerCompression {
    pub fn ratio(&self) -> Ratio<u64> {
        self.dense_bytes / self.comp_bytes
    }

    pub fn param_ratio(&self) -> Ratio<u64> {
        Ratio::new(self.dense_params, self.circ_params)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompressionReport {
    pub baseline_bits: u32,
    pub compressed_bits: u32,
    pub layers: Vec<LayerCompression>,
}

/// Bytes for `count` values of `bits` each; fractional for odd bit widths.
fn bytes(count: u64, bits: u32) -> Ratio<u64> {
    Ratio::new(count * u64::from(bits), 8)
}

/// Per-layer weight storage, dense at `baseline_bits` versus block-circulant
/// at `compressed_bits`. Biases and pooling layers are not counted.
pub fn compression_report<T: Scalar>(net: &Network<T>, baseline_bits: u32, compressed_bits: u32) -> Result<CompressionReport> {
    if baseline_bits == 0 || compressed_bits == 0 {
        return Err(Error::InvalidValue("bit widths must be positive".into()));
    }
    let shapes = net.spec().shapes()?;
    let mut layers = Vec::new();
    for (idx, ((stage, spec), input)) in net.stages().iter().zip(&net.spec().layers).zip(&shapes).enumerate() {
        let (name, dense, circ) = match (stage, spec) {
            (Stage::Fc(l), LayerSpec::Fc { .. }) => {
                let n: usize = input.iter().product();
                (format!("fc{}", idx + 1), (l.outputs() * n) as u64, l.weights().param_count() as u64)
            }
            (Stage::Conv(l), LayerSpec::Conv { .. }) => {
                let r2 = l.kernel_size() * l.kernel_size();
                (format!("conv{}", idx + 1), (r2 * l.in_channels() * l.out_channels()) as u64, l.param_count() as u64)
            }
            _ => continue,
        };
        layers.push(LayerCompression {
            layer: name,
            dense_params: dense,
            circ_params: circ,
            dense_bytes: bytes(dense, baseline_bits),
            comp_bytes: bytes(circ, compressed_bits),
        });
    }
    Ok(CompressionReport { baseline_bits, compressed_bits, layers })
}

impl CompressionReport {
    pub fn dense_params(&self) -> u64 {
        self.layers.iter().map(|l| l.dense_params).sum()
    }

    pub fn circ_params(&self) -> u64 {
        self.layers.iter().map(|l| l.circ_params).sum()
    }

    pub fn total_ratio(&self) -> Ratio<u64> {
        let dense: Ratio<u64> = self.layers.iter().map(|l| l.dense_bytes).sum();
        let comp: Ratio<u64> = self.layers.iter().map(|l| l.comp_bytes).sum();
        dense / comp
    }

    /// Columns `layer,dense_params,circ_params,dense_bytes,comp_bytes,ratio`;
    /// the last row, `total`, covers the whole model.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["layer", "dense_params", "circ_params", "dense_bytes", "comp_bytes", "ratio"])?;
        for l in &self.layers {
            w.write_record([
                l.layer.clone(),
                l.dense_params.to_string(),
                l.circ_params.to_string(),
                l.dense_bytes.to_string(),
                l.comp_bytes.to_string(),
                l.ratio().to_string(),
            ])?;
        }
        let dense: Ratio<u64> = self.layers.iter().map(|l| l.dense_bytes).sum();
        let comp: Ratio<u64> = self.layers.iter().map(|l| l.comp_bytes).sum();
        w.write_record([
            "total".to_string(),
            self.dense_params().to_string(),
            self.circ_params().to_string(),
            dense.to_string(),
            comp.to_string(),
            self.total_ratio().to_string(),
        ])?;
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv is utf-8")
    }
}

impl fmt::Display for CompressionReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_csv_string())
    }
}

/// Parses a ratio printed as `a` or `a/b`.
pub fn parse_ratio(s: &str) -> Result<Ratio<u64>> {
    s.trim().parse().map_err(|_| Error::InvalidValue(format!("ratio `{s}`")))
}
