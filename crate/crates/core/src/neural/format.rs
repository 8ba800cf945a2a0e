//! Binary model container.
//!
//! Layout (all integers `u32` little-endian):
//!
//! ```text
//! "PRNN" | version | n_entries
//! n_entries x (kind | n_dims | dims...)      entry 0 is the input shape
//! parameters as f64 LE, weight then bias, in layer order
//! ```

use std::path::Path;

use super::model::{Layer, ModelGraph};
use super::Tensor;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"PRNN";
pub const VERSION: u32 = 1;

const KIND_INPUT: u32 = 0;
const KIND_CONV: u32 = 1;
const KIND_POOL: u32 = 2;
const KIND_UPSAMPLE: u32 = 3;
const KIND_CONCAT: u32 = 4;
const KIND_RELU: u32 = 5;
const KIND_SIGMOID: u32 = 6;
const KIND_GAP: u32 = 7;
const KIND_DROPOUT: u32 = 8;
const KIND_DENSE: u32 = 9;
const KIND_SOFTMAX: u32 = 10;

fn u32_of(v: usize) -> Result<u32> {
    u32::try_from(v).map_err(|_| Error::InvalidModel(format!("dimension {v} exceeds u32")))
}

fn entry(layer: &Layer) -> Result<(u32, Vec<u32>)> {
    Ok(match layer {
        Layer::Conv2d {
            in_ch,
            out_ch,
            k,
            stride,
            pad_before,
            pad_after,
            ..
        } => (
            KIND_CONV,
            [*in_ch, *out_ch, *k, *stride, *pad_before, *pad_after]
                .into_iter()
                .map(u32_of)
                .collect::<Result<_>>()?,
        ),
        Layer::MaxPool2 => (KIND_POOL, vec![]),
        Layer::Upsample2 => (KIND_UPSAMPLE, vec![]),
        Layer::ConcatSkip { source } => (KIND_CONCAT, vec![u32_of(*source)?]),
        Layer::Relu => (KIND_RELU, vec![]),
        Layer::Sigmoid => (KIND_SIGMOID, vec![]),
        Layer::GlobalAvgPool => (KIND_GAP, vec![]),
        Layer::Dropout { rate } => (KIND_DROPOUT, vec![(rate * 1e6).round() as u32]),
        Layer::Dense {
            in_features,
            out_features,
            ..
        } => (KIND_DENSE, vec![u32_of(*in_features)?, u32_of(*out_features)?]),
        Layer::Softmax => (KIND_SOFTMAX, vec![]),
    })
}

pub fn to_bytes(model: &ModelGraph) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(16 + model.param_count() * 8);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&u32_of(model.layers.len() + 1)?.to_le_bytes());
    let mut push_entry = |kind: u32, dims: &[u32]| {
        out.extend_from_slice(&kind.to_le_bytes());
        out.extend_from_slice(&(dims.len() as u32).to_le_bytes());
        for d in dims {
            out.extend_from_slice(&d.to_le_bytes());
        }
    };
    let input: Vec<u32> = model.input.iter().map(|&d| u32_of(d)).collect::<Result<_>>()?;
    push_entry(KIND_INPUT, &input);
    for layer in &model.layers {
        let (kind, dims) = entry(layer)?;
        push_entry(kind, &dims);
    }
    for p in model.params() {
        for v in &p.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::InvalidModel("file truncated".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes(b.try_into().expect("4 bytes")))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let b = self.take(n.checked_mul(8).ok_or_else(|| Error::InvalidModel("size overflow".into()))?)?;
        Ok(b.chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect())
    }
}

fn dims_exact(kind: u32, dims: &[u32], n: usize) -> Result<Vec<usize>> {
    if dims.len() != n {
        return Err(Error::InvalidModel(format!(
            "layer kind {kind} expects {n} dims, found {}",
            dims.len()
        )));
    }
    Ok(dims.iter().map(|&d| d as usize).collect())
}

pub fn from_bytes(bytes: &[u8]) -> Result<ModelGraph> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4)? != MAGIC {
        return Err(Error::InvalidModel("missing PRNN magic".into()));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::InvalidModel(format!("unsupported version {version}")));
    }
    let n = r.u32()? as usize;
    if n == 0 || n > 4096 {
        return Err(Error::InvalidModel(format!("implausible layer count {n}")));
    }
    let mut table = Vec::with_capacity(n);
    for _ in 0..n {
        let kind = r.u32()?;
        let nd = r.u32()? as usize;
        if nd > 16 {
            return Err(Error::InvalidModel(format!("layer with {nd} dims")));
        }
        let dims: Vec<u32> = (0..nd).map(|_| r.u32()).collect::<Result<_>>()?;
        table.push((kind, dims));
    }
    let (kind0, input) = &table[0];
    if *kind0 != KIND_INPUT {
        return Err(Error::InvalidModel("first entry must be the input shape".into()));
    }
    let input: Vec<usize> = input.iter().map(|&d| d as usize).collect();
    let mut layers = Vec::with_capacity(n - 1);
    for (i, (kind, dims)) in table[1..].iter().enumerate() {
        let layer = match *kind {
            KIND_CONV => {
                let d = dims_exact(*kind, dims, 6)?;
                let (in_ch, out_ch, k) = (d[0], d[1], d[2]);
                let weight = Tensor::new(vec![out_ch, in_ch, k, k], r.f64s(out_ch * in_ch * k * k)?)?;
                let bias = Tensor::new(vec![out_ch], r.f64s(out_ch)?)?;
                Layer::Conv2d {
                    in_ch,
                    out_ch,
                    k,
                    stride: d[3],
                    pad_before: d[4],
                    pad_after: d[5],
                    weight,
                    bias,
                }
            }
            KIND_DENSE => {
                let d = dims_exact(*kind, dims, 2)?;
                let weight = Tensor::new(vec![d[1], d[0]], r.f64s(d[0] * d[1])?)?;
                let bias = Tensor::new(vec![d[1]], r.f64s(d[1])?)?;
                Layer::Dense {
                    in_features: d[0],
                    out_features: d[1],
                    weight,
                    bias,
                }
            }
            KIND_CONCAT => {
                let source = dims_exact(*kind, dims, 1)?[0];
                if source >= i {
                    return Err(Error::InvalidModel(format!("layer {i} skips from later layer {source}")));
                }
                Layer::ConcatSkip { source }
            }
            KIND_DROPOUT => Layer::Dropout {
                rate: dims_exact(*kind, dims, 1)?[0] as f64 / 1e6,
            },
            KIND_POOL | KIND_UPSAMPLE | KIND_RELU | KIND_SIGMOID | KIND_GAP | KIND_SOFTMAX => {
                dims_exact(*kind, dims, 0)?;
                match *kind {
                    KIND_POOL => Layer::MaxPool2,
                    KIND_UPSAMPLE => Layer::Upsample2,
                    KIND_RELU => Layer::Relu,
                    KIND_SIGMOID => Layer::Sigmoid,
                    KIND_GAP => Layer::GlobalAvgPool,
                    _ => Layer::Softmax,
                }
            }
            other => return Err(Error::InvalidModel(format!("unknown layer kind {other}"))),
        };
        layers.push(layer);
    }
    if r.pos != bytes.len() {
        return Err(Error::InvalidModel(format!("{} trailing bytes", bytes.len() - r.pos)));
    }
    Ok(ModelGraph { input, layers })
}

pub fn save_model(model: &ModelGraph, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, to_bytes(model)?)?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<ModelGraph> {
    from_bytes(&std::fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::model::{build_classifier, build_toy_unet, ClassifierConfig, UNetConfig};

    #[test]
    fn round_trips_both_architectures() {
        for m in [
            build_classifier(&ClassifierConfig::default()).unwrap(),
            build_toy_unet(&UNetConfig::default()).unwrap(),
        ] {
            let bytes = to_bytes(&m).unwrap();
            assert_eq!(&bytes[..4], b"PRNN");
            assert_eq!(from_bytes(&bytes).unwrap(), m);
        }
    }

    #[test]
    fn rejects_corruption() {
        let m = build_classifier(&ClassifierConfig::default()).unwrap();
        let bytes = to_bytes(&m).unwrap();
        assert!(matches!(from_bytes(&bytes[..bytes.len() - 3]), Err(Error::InvalidModel(_))));
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(from_bytes(&bad).is_err());
        let mut extra = bytes;
        extra.push(0);
        assert!(from_bytes(&extra).is_err());
        assert!(from_bytes(b"").is_err());
    }
}
