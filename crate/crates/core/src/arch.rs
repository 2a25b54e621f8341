//! Network architecture descriptions and their text format.
//!
//! One record per line, `#` starts a comment:
//!
//! ```text
//! input shape=28x28x1
//! conv r=3 out=8 k=4 act=relu
//! maxpool window=2
//! fc out=10 k=2 act=identity
//! ```

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::layers::Activation;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerSpec {
    Fc { outputs: usize, k: usize, activation: Activation },
    Conv { r: usize, out_channels: usize, k: usize, activation: Activation },
    MaxPool { window: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NetworkSpec {
    pub input_shape: Vec<usize>,
    pub layers: Vec<LayerSpec>,
}

impl NetworkSpec {
    pub fn new(input_shape: Vec<usize>, layers: Vec<LayerSpec>) -> Result<Self> {
        let spec = Self { input_shape, layers };
        spec.shapes()?;
        Ok(spec)
    }

    /// Multi-layer perceptron `inputs → hidden… → classes`, ReLU on hidden
    /// layers and identity on the output.
    pub fn mlp(inputs: usize, hidden: &[usize], classes: usize, k: usize) -> Result<Self> {
        let mut layers: Vec<LayerSpec> = hidden
            .iter()
            .map(|&outputs| LayerSpec::Fc { outputs, k, activation: Activation::Relu })
            .collect();
        layers.push(LayerSpec::Fc { outputs: classes, k, activation: Activation::Identity });
        Self::new(vec![inputs], layers)
    }

    /// Shape entering each layer, followed by the output shape.
    pub fn shapes(&self) -> Result<Vec<Vec<usize>>> {
        if self.input_shape.is_empty() || self.input_shape.contains(&0) {
            return Err(Error::InvalidSpec(format!("input shape {:?}", self.input_shape)));
        }
        if self.layers.is_empty() {
            return Err(Error::InvalidSpec("network has no layers".into()));
        }
        let mut shapes = vec![self.input_shape.clone()];
        for (idx, layer) in self.layers.iter().enumerate() {
            let cur = shapes.last().expect("starts non-empty");
            let bad = |why: String| Error::InvalidSpec(format!("layer {}: {why}", idx + 1));
            let next = match *layer {
                LayerSpec::Fc { outputs, k, .. } => {
                    if outputs == 0 || k == 0 {
                        return Err(bad("fc needs out ≥ 1 and k ≥ 1".into()));
                    }
                    vec![outputs]
                }
                LayerSpec::Conv { r, out_channels, k, .. } => {
                    let &[w, h, c] = cur.as_slice() else {
                        return Err(bad(format!("conv needs a W×H×C input, got {cur:?}")));
                    };
                    if r == 0 || r > w || r > h {
                        return Err(bad(format!("kernel {r} does not fit {w}×{h}")));
                    }
                    if k == 0 || out_channels == 0 || c % k != 0 || out_channels % k != 0 {
                        return Err(bad(format!("k={k} must divide channels {c} and {out_channels}")));
                    }
                    vec![w - r + 1, h - r + 1, out_channels]
                }
                LayerSpec::MaxPool { window } => {
                    let &[w, h, c] = cur.as_slice() else {
                        return Err(bad(format!("maxpool needs a W×H×C input, got {cur:?}")));
                    };
                    if window == 0 || w % window != 0 || h % window != 0 {
                        return Err(bad(format!("{w}×{h} not divisible by window {window}")));
                    }
                    vec![w / window, h / window, c]
                }
            };
            shapes.push(next);
        }
        let out = shapes.last().expect("non-empty");
        if out.len() != 1 || out[0] < 2 {
            return Err(Error::InvalidSpec(format!("final layer must produce ≥ 2 logits, got {out:?}")));
        }
        Ok(shapes)
    }

    pub fn input_len(&self) -> usize {
        self.input_shape.iter().product()
    }

    pub fn classes(&self) -> usize {
        match self.layers.last() {
            Some(LayerSpec::Fc { outputs, .. }) => *outputs,
            _ => self.shapes().map(|s| s.last().map_or(0, |v| v.iter().product())).unwrap_or(0),
        }
    }

    /// Replaces the block size of every FC layer.
    pub fn with_fc_block_size(&self, k: usize) -> Result<Self> {
        let layers = self
            .layers
            .iter()
            .map(|l| match *l {
                LayerSpec::Fc { outputs, activation, .. } => LayerSpec::Fc { outputs, k, activation },
                other => other,
            })
            .collect();
        Self::new(self.input_shape.clone(), layers)
    }
}

impl fmt::Display for NetworkSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let dims: Vec<String> = self.input_shape.iter().map(|d| d.to_string()).collect();
        writeln!(f, "input shape={}", dims.join("x"))?;
        for layer in &self.layers {
            match *layer {
                LayerSpec::Fc { outputs, k, activation } => {
                    writeln!(f, "fc out={outputs} k={k} act={}", activation.name())?
                }
                LayerSpec::Conv { r, out_channels, k, activation } => {
                    writeln!(f, "conv r={r} out={out_channels} k={k} act={}", activation.name())?
                }
                LayerSpec::MaxPool { window } => writeln!(f, "maxpool window={window}")?,
            }
        }
        Ok(())
    }
}

impl FromStr for NetworkSpec {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let mut input_shape = None;
        let mut layers = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |message: String| Error::Parse { line: line_no, message };
            let mut words = line.split_whitespace();
            let kind = words.next().expect("line is non-empty");
            let mut fields = Fields::default();
            for word in words {
                let (key, value) = word
                    .split_once('=')
                    .ok_or_else(|| err(format!("expected key=value, found `{word}`")))?;
                fields.entries.push((key.to_string(), value.to_string()));
            }
            match kind {
                "input" => {
                    if input_shape.is_some() || !layers.is_empty() {
                        return Err(err("`input` must appear once, before any layer".into()));
                    }
                    let shape = fields.take("shape").ok_or_else(|| err("input needs shape=".into()))?;
                    let dims = shape
                        .split(['x', ','])
                        .map(|d| d.parse::<usize>().map_err(|_| err(format!("bad dimension `{d}`"))))
                        .collect::<Result<Vec<_>>>()?;
                    input_shape = Some(dims);
                }
                "fc" => layers.push(LayerSpec::Fc {
                    outputs: fields.number("out", None).map_err(err)?,
                    k: fields.number("k", Some(1)).map_err(err)?,
                    activation: fields.activation().map_err(err)?,
                }),
                "conv" => layers.push(LayerSpec::Conv {
                    r: fields.number("r", None).map_err(err)?,
                    out_channels: fields.number("out", None).map_err(err)?,
                    k: fields.number("k", Some(1)).map_err(err)?,
                    activation: fields.activation().map_err(err)?,
                }),
                "maxpool" => layers.push(LayerSpec::MaxPool { window: fields.number("window", Some(2)).map_err(err)? }),
                other => return Err(err(format!("unknown layer type `{other}`"))),
            }
            if let Some((key, _)) = fields.entries.first() {
                return Err(err(format!("unknown field `{key}`")));
            }
        }
        let input_shape = input_shape.ok_or(Error::Parse { line: 0, message: "missing `input` record".into() })?;
        Self::new(input_shape, layers)
    }
}

#[derive(Default)]
struct Fields {
    entries: Vec<(String, String)>,
}

impl Fields {
    fn take(&mut self, key: &str) -> Option<String> {
        let pos = self.entries.iter().position(|(k, _)| k == key)?;
        Some(self.entries.remove(pos).1)
    }

    fn number(&mut self, key: &str, default: Option<usize>) -> std::result::Result<usize, String> {
        match (self.take(key), default) {
            (Some(v), _) => v.parse().map_err(|_| format!("`{key}` must be a non-negative integer, found `{v}`")),
            (None, Some(d)) => Ok(d),
            (None, None) => Err(format!("missing `{key}=`")),
        }
    }

    fn activation(&mut self) -> std::result::Result<Activation, String> {
        self.take("act").map_or(Ok(Activation::Relu), |v| v.parse())
    }
}
