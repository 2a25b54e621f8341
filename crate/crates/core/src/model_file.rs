//! Versioned, checksummed model files.
//!
//! Layout, all integers little-endian:
//!
//! | bytes | content |
//! |-------|---------|
//! | 4 | magic `BCMF` |
//! | 4 | format version (`1`) |
//! | 4 | header length `h` |
//! | h | UTF-8 header: the architecture text, then `payload f64` or `payload i16 frac_bits=a,b,…` |
//! | 8 | payload length |
//! | 4 | CRC-32 of the payload |
//! | … | parameters in [`Network::parameters`] order, as `f64` or raw `i16` |

use std::fs;
use std::path::Path;

use crate::arch::NetworkSpec;
use crate::error::{Error, Result};
use crate::network::{Network, Stage};
use crate::quantize::{dequantize, FixedPointTensor};

pub const MODEL_MAGIC: [u8; 4] = *b"BCMF";
pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Clone)]
pub struct ModelFile {
    /// Dequantized when the file stores fixed-point values.
    pub network: Network<f64>,
    pub quantized: Option<Vec<FixedPointTensor>>,
}

/// Weight and bias lengths per stage, the tensor split used for quantized payloads.
fn tensor_lengths(net: &Network<f64>) -> Vec<usize> {
    net.stages()
        .iter()
        .flat_map(|s| match s {
            Stage::Fc(l) => vec![l.weights().param_count(), l.bias().len()],
            Stage::Conv(l) => vec![l.param_count(), l.bias().len()],
            Stage::MaxPool { .. } => vec![],
        })
        .collect()
}

pub fn encode_model(net: &Network<f64>, quantized: Option<&[FixedPointTensor]>) -> Result<Vec<u8>> {
    let mut header = net.spec().to_string();
    let mut payload = Vec::new();
    match quantized {
        None => {
            header.push_str("payload f64\n");
            for v in net.parameters() {
                payload.extend_from_slice(&v.to_le_bytes());
            }
        }
        Some(tensors) => {
            let lengths = tensor_lengths(net);
            let actual: Vec<usize> = tensors.iter().map(|t| t.raw.len()).collect();
            if actual != lengths {
                return Err(Error::InvalidShape(format!("quantized tensors {actual:?}, network expects {lengths:?}")));
            }
            let bits: Vec<String> = tensors.iter().map(|t| t.frac_bits.to_string()).collect();
            header.push_str(&format!("payload i16 frac_bits={}\n", bits.join(",")));
            for t in tensors {
                for r in &t.raw {
                    payload.extend_from_slice(&r.to_le_bytes());
                }
            }
        }
    }
    let mut out = Vec::with_capacity(24 + header.len() + payload.len());
    out.extend_from_slice(&MODEL_MAGIC);
    out.extend_from_slice(&MODEL_VERSION.to_le_bytes());
    out.extend_from_slice(&(header.len() as u32).to_le_bytes());
    out.extend_from_slice(header.as_bytes());
    out.extend_from_slice(&(payload.len() as u64).to_le_bytes());
    out.extend_from_slice(&crc32fast::hash(&payload).to_le_bytes());
    out.extend_from_slice(&payload);
    Ok(out)
}

struct Reader<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self.at.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or_else(|| {
            Error::TruncatedFile(format!("{what}: need {n} bytes, {} left", self.bytes.len() - self.at))
        })?;
        let slice = &self.bytes[self.at..end];
        self.at = end;
        Ok(slice)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().expect("4 bytes")))
    }
}

pub fn decode_model(bytes: &[u8]) -> Result<ModelFile> {
    let mut r = Reader { bytes, at: 0 };
    let magic = r.take(4, "magic")?;
    if magic != MODEL_MAGIC {
        return Err(Error::BadMagic {
            expected: u32::from_le_bytes(MODEL_MAGIC),
            found: u32::from_le_bytes(magic.try_into().expect("4 bytes")),
        });
    }
    let version = r.u32("version")?;
    if version != MODEL_VERSION {
        return Err(Error::VersionMismatch(version));
    }
    let header_len = r.u32("header length")? as usize;
    let header = std::str::from_utf8(r.take(header_len, "header")?)
        .map_err(|_| Error::Parse { line: 0, message: "header is not UTF-8".into() })?;
    let payload_len = u64::from_le_bytes(r.take(8, "payload length")?.try_into().expect("8 bytes"));
    let checksum = r.u32("checksum")?;
    let payload_len = usize::try_from(payload_len).map_err(|_| Error::TruncatedFile("payload length".into()))?;
    let payload = r.take(payload_len, "payload")?;
    let actual = crc32fast::hash(payload);
    if actual != checksum {
        return Err(Error::ChecksumMismatch { expected: checksum, actual });
    }

    let (arch_text, payload_line) = header
        .trim_end()
        .rsplit_once('\n')
        .ok_or(Error::Parse { line: 0, message: "header lacks a payload line".into() })?;
    let spec: NetworkSpec = arch_text.parse()?;
    let mut network = Network::<f64>::zeros(&spec)?;
    let count = network.param_count();
    let expected_len = |width: usize| count * width;
    let bad_line = |message: String| Error::Parse { line: header.lines().count(), message };

    let quantized = match payload_line.split_whitespace().collect::<Vec<_>>().as_slice() {
        ["payload", "f64"] => {
            if payload.len() != expected_len(8) {
                return Err(Error::TruncatedFile(format!("payload {} bytes, expected {}", payload.len(), expected_len(8))));
            }
            let values: Vec<f64> = payload
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
                .collect();
            network.set_parameters(&values)?;
            None
        }
        ["payload", "i16", bits] => {
            if payload.len() != expected_len(2) {
                return Err(Error::TruncatedFile(format!("payload {} bytes, expected {}", payload.len(), expected_len(2))));
            }
            let bits = bits.strip_prefix("frac_bits=").ok_or_else(|| bad_line(format!("bad field `{bits}`")))?;
            let frac: Vec<u8> = bits
                .split(',')
                .map(|b| b.parse().map_err(|_| bad_line(format!("bad frac_bits `{b}`"))))
                .collect::<Result<_>>()?;
            let lengths = tensor_lengths(&network);
            if frac.len() != lengths.len() {
                return Err(bad_line(format!("{} frac_bits for {} tensors", frac.len(), lengths.len())));
            }
            let mut raw_iter = payload.chunks_exact(2).map(|c| i16::from_le_bytes([c[0], c[1]]));
            let tensors = lengths
                .iter()
                .zip(frac)
                .map(|(&n, f)| FixedPointTensor::new(vec![n], raw_iter.by_ref().take(n).collect(), f))
                .collect::<Result<Vec<_>>>()?;
            let values: Vec<f64> = tensors.iter().flat_map(dequantize::<f64>).collect();
            network.set_parameters(&values)?;
            Some(tensors)
        }
        _ => return Err(bad_line(format!("unknown payload line `{payload_line}`"))),
    };
    Ok(ModelFile { network, quantized })
}

pub fn save_model(path: &Path, net: &Network<f64>, quantized: Option<&[FixedPointTensor]>) -> Result<()> {
    fs::write(path, encode_model(net, quantized)?)?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<ModelFile> {
    decode_model(&fs::read(path)?)
}
