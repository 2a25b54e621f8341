//! Per-inference FFT work implied by a network's layer shapes.

use std::collections::BTreeMap;

use blockcirc::{FftPlan, Network, OpCounter, Scalar, Stage};

use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TransformKind {
    Forward,
    Inverse,
}

/// `count` transforms of one size and direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WorkloadEntry {
    pub fft_size: usize,
    pub kind: TransformKind,
    pub count: u64,
    /// Butterflies per transform after the real-input saving.
    pub butterflies: u64,
}

impl WorkloadEntry {
    /// Levels of a radix-2 transform, `log2(fft_size)`.
    pub fn levels(&self) -> u32 {
        self.fft_size.trailing_zeros()
    }

    /// Butterflies scheduled in each level, rounded up.
    pub fn per_level(&self) -> u64 {
        self.butterflies.div_ceil(u64::from(self.levels()).max(1))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Workload {
    pub entries: Vec<WorkloadEntry>,
    /// Component-wise spectrum products (complex multiplies), handled outside the butterfly array.
    pub spectrum_products: u64,
    /// Operations the equivalent dense network would perform (2 per multiply-accumulate).
    pub dense_ops: u64,
}

impl Workload {
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn total_butterflies(&self) -> u64 {
        self.entries.iter().map(|e| e.count * e.butterflies).sum()
    }

    pub fn transforms(&self) -> u64 {
        self.entries.iter().map(|e| e.count).sum()
    }
}

/// Butterflies of a size-`k` real-input transform in each direction, as
/// counted by the transform engine itself.
pub fn real_transform_butterflies(k: usize) -> Result<(u64, u64)> {
    let plan = FftPlan::<f64>::new(k)?;
    let mut fwd = OpCounter::new();
    let spec = plan.rfft_counted(&vec![0.0; k], &mut fwd)?;
    let mut inv = OpCounter::new();
    plan.irfft_counted(&spec, &mut inv)?;
    Ok((fwd.butterflies, inv.butterflies))
}

#[derive(Default)]
struct Builder {
    counts: BTreeMap<(usize, TransformKind), u64>,
    spectrum_products: u64,
    dense_ops: u64,
}

impl Builder {
    fn add(&mut self, size: usize, kind: TransformKind, count: u64) {
        if size > 1 && count > 0 {
            *self.counts.entry((size, kind)).or_default() += count;
        }
    }

    fn finish(self) -> Result<Workload> {
        let mut entries = Vec::with_capacity(self.counts.len());
        for ((fft_size, kind), count) in self.counts {
            let (fwd, inv) = real_transform_butterflies(fft_size)?;
            let butterflies = if kind == TransformKind::Forward { fwd } else { inv };
            entries.push(WorkloadEntry { fft_size, kind, count, butterflies });
        }
        Ok(Workload { entries, spectrum_products: self.spectrum_products, dense_ops: self.dense_ops })
    }
}

/// One inference with cached weight spectra.
///
/// An FC layer with `p×q` blocks needs `q` forward and `p` inverse transforms
/// and `p·q` spectrum products. A CONV layer transforms every input pixel's
/// `C/k` channel segments, inverts every output pixel's `P/k` segments and
/// multiplies `r²·(C/k)·(P/k)` spectra per output pixel.
pub fn workload_of<T: Scalar>(net: &Network<T>) -> Result<Workload> {
    let shapes = net.spec().shapes()?;
    let mut b = Builder::default();
    for (stage, input) in net.stages().iter().zip(&shapes) {
        match stage {
            Stage::Fc(l) => {
                let w = l.weights();
                let len = w.kernel().transform_len();
                let (p, q) = (w.block_rows() as u64, w.block_cols() as u64);
                b.add(len, TransformKind::Forward, q);
                b.add(len, TransformKind::Inverse, p);
                b.spectrum_products += p * q * (len as u64 / 2 + 1);
                b.dense_ops += 2 * (w.rows() * w.cols()) as u64;
            }
            Stage::Conv(l) => {
                let k = l.block_size();
                let len = l.kernels()[0].kernel().transform_len();
                let r = l.kernel_size();
                let (wi, hi) = (input[0], input[1]);
                let out_px = ((wi - r + 1) * (hi - r + 1)) as u64;
                let (nb_in, nb_out) = ((l.in_channels() / k) as u64, (l.out_channels() / k) as u64);
                b.add(len, TransformKind::Forward, (wi * hi) as u64 * nb_in);
                b.add(len, TransformKind::Inverse, out_px * nb_out);
                b.spectrum_products += out_px * (r * r) as u64 * nb_in * nb_out * (len as u64 / 2 + 1);
                b.dense_ops += 2 * out_px * (r * r * l.in_channels() * l.out_channels()) as u64;
            }
            Stage::MaxPool { .. } => {}
        }
    }
    b.finish()
}

/// `count` forward and inverse transforms of size `k`, with no dense-op credit.
pub fn uniform_workload(k: usize, count: u64) -> Result<Workload> {
    let mut b = Builder::default();
    b.add(k, TransformKind::Forward, count);
    b.add(k, TransformKind::Inverse, count);
    b.finish()
}
