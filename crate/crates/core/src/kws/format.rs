//! On-disk model format, magic "KWS1".
//!
//! ```text
//! "KWS1" | version u8 = 1 | flavor u8 (0 = float64, 1 = int8) | payload
//! ```
//!
//! Float payload: the six tensors in fixed order (conv1_w, conv1_b, conv2_w,
//! conv2_b, dense_w, dense_b), each a u32 LE length plus f64 LE values.
//!
//! INT8 payload: three activation QuantParams (scale f64, zero point i32),
//! then per layer the weight scale, i8 weights, and i32 biases with u32
//! lengths. Requantization multipliers and the logit scale are derived
//! values and are recomputed on load.

use std::path::Path;

use crate::kws::model::{
    C1_OUT, C2_OUT, FLAT, IN_CHANNELS, KERNEL, N_CLASSES,
};
use crate::kws::quant::{QuantParams, QuantTensor, QuantizedKwsModel, Requant};
use crate::kws::KwsError;
use crate::kws::model::KwsModel;

const MAGIC: [u8; 4] = *b"KWS1";
const VERSION: u8 = 1;
const FLAVOR_FLOAT: u8 = 0;
const FLAVOR_INT8: u8 = 1;

pub enum ModelFile {
    Float(KwsModel),
    Int8(QuantizedKwsModel),
}

// --- writing ---

fn put_tensor_f64(out: &mut Vec<u8>, t: &[f64]) {
    out.extend_from_slice(&(t.len() as u32).to_le_bytes());
    for v in t {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

pub fn to_bytes_float(m: &KwsModel) -> Vec<u8> {
    let mut out = vec![];
    out.extend_from_slice(&MAGIC);
    out.push(VERSION);
    out.push(FLAVOR_FLOAT);
    for t in [&m.conv1_w, &m.conv1_b, &m.conv2_w, &m.conv2_b, &m.dense_w, &m.dense_b] {
        put_tensor_f64(&mut out, t);
    }
    out
}

fn put_qparams(out: &mut Vec<u8>, q: QuantParams) {
    out.extend_from_slice(&q.scale.to_le_bytes());
    out.extend_from_slice(&q.zero_point.to_le_bytes());
}

fn put_qtensor(out: &mut Vec<u8>, t: &QuantTensor) {
    out.extend_from_slice(&t.scale.to_le_bytes());
    out.extend_from_slice(&(t.weights.len() as u32).to_le_bytes());
    for w in &t.weights {
        out.push(*w as u8);
    }
    out.extend_from_slice(&(t.bias.len() as u32).to_le_bytes());
    for b in &t.bias {
        out.extend_from_slice(&b.to_le_bytes());
    }
}

pub fn to_bytes_int8(m: &QuantizedKwsModel) -> Vec<u8> {
    let mut out = vec![];
    out.extend_from_slice(&MAGIC);
    out.push(VERSION);
    out.push(FLAVOR_INT8);
    put_qparams(&mut out, m.input_q);
    put_qparams(&mut out, m.act1_q);
    put_qparams(&mut out, m.act2_q);
    put_qtensor(&mut out, &m.conv1);
    put_qtensor(&mut out, &m.conv2);
    put_qtensor(&mut out, &m.dense);
    out
}

pub fn save_float(m: &KwsModel, path: &Path) -> Result<(), KwsError> {
    std::fs::write(path, to_bytes_float(m))?;
    Ok(())
}

pub fn save_int8(m: &QuantizedKwsModel, path: &Path) -> Result<(), KwsError> {
    std::fs::write(path, to_bytes_int8(m))?;
    Ok(())
}

// --- reading ---

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], KwsError> {
        if self.pos + n > self.bytes.len() {
            return Err(KwsError::BadFormat(format!(
                "truncated at byte {} (wanted {n} more of {})",
                self.pos,
                self.bytes.len()
            )));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, KwsError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn i32(&mut self) -> Result<i32, KwsError> {
        Ok(i32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64, KwsError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn tensor_f64(&mut self, expect: usize, name: &str) -> Result<Vec<f64>, KwsError> {
        let len = self.u32()? as usize;
        if len != expect {
            return Err(KwsError::BadFormat(format!(
                "tensor {name} has {len} values, expected {expect}"
            )));
        }
        let mut out = Vec::with_capacity(len);
        for _ in 0..len {
            out.push(self.f64()?);
        }
        Ok(out)
    }

    fn qparams(&mut self) -> Result<QuantParams, KwsError> {
        let scale = self.f64()?;
        let zero_point = self.i32()?;
        if !(scale.is_finite() && scale > 0.0) {
            return Err(KwsError::BadFormat(format!("non-positive quant scale {scale}")));
        }
        Ok(QuantParams { scale, zero_point })
    }

    fn qtensor(&mut self, expect_w: usize, expect_b: usize, name: &str) -> Result<QuantTensor, KwsError> {
        let scale = self.f64()?;
        if !(scale.is_finite() && scale > 0.0) {
            return Err(KwsError::BadFormat(format!("bad weight scale for {name}")));
        }
        let wlen = self.u32()? as usize;
        if wlen != expect_w {
            return Err(KwsError::BadFormat(format!(
                "{name} has {wlen} weights, expected {expect_w}"
            )));
        }
        let weights = self.take(wlen)?.iter().map(|&b| b as i8).collect();
        let blen = self.u32()? as usize;
        if blen != expect_b {
            return Err(KwsError::BadFormat(format!(
                "{name} has {blen} biases, expected {expect_b}"
            )));
        }
        let mut bias = Vec::with_capacity(blen);
        for _ in 0..blen {
            bias.push(self.i32()?);
        }
        Ok(QuantTensor { weights, scale, bias })
    }

    fn done(&self) -> Result<(), KwsError> {
        if self.pos != self.bytes.len() {
            return Err(KwsError::BadFormat(format!(
                "{} trailing bytes after payload",
                self.bytes.len() - self.pos
            )));
        }
        Ok(())
    }
}

pub fn from_bytes(bytes: &[u8]) -> Result<ModelFile, KwsError> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4)? != MAGIC {
        return Err(KwsError::BadFormat("bad magic, not a KWS1 model".into()));
    }
    let version = r.take(1)?[0];
    if version != VERSION {
        return Err(KwsError::BadFormat(format!("unsupported version {version}")));
    }
    let flavor = r.take(1)?[0];
    match flavor {
        FLAVOR_FLOAT => {
            let m = KwsModel {
                conv1_w: r.tensor_f64(C1_OUT * IN_CHANNELS * KERNEL, "conv1_w")?,
                conv1_b: r.tensor_f64(C1_OUT, "conv1_b")?,
                conv2_w: r.tensor_f64(C2_OUT * C1_OUT * KERNEL, "conv2_w")?,
                conv2_b: r.tensor_f64(C2_OUT, "conv2_b")?,
                dense_w: r.tensor_f64(N_CLASSES * FLAT, "dense_w")?,
                dense_b: r.tensor_f64(N_CLASSES, "dense_b")?,
            };
            r.done()?;
            Ok(ModelFile::Float(m))
        }
        FLAVOR_INT8 => {
            let input_q = r.qparams()?;
            let act1_q = r.qparams()?;
            let act2_q = r.qparams()?;
            let conv1 = r.qtensor(C1_OUT * IN_CHANNELS * KERNEL, C1_OUT, "conv1")?;
            let conv2 = r.qtensor(C2_OUT * C1_OUT * KERNEL, C2_OUT, "conv2")?;
            let dense = r.qtensor(N_CLASSES * FLAT, N_CLASSES, "dense")?;
            r.done()?;
            Ok(ModelFile::Int8(QuantizedKwsModel {
                requant1: Requant::from_real(input_q.scale * conv1.scale / act1_q.scale),
                requant2: Requant::from_real(act1_q.scale * conv2.scale / act2_q.scale),
                logit_scale: act2_q.scale * dense.scale,
                input_q,
                act1_q,
                act2_q,
                conv1,
                conv2,
                dense,
            }))
        }
        f => Err(KwsError::BadFormat(format!("unknown flavor {f}"))),
    }
}

pub fn load(path: &Path) -> Result<ModelFile, KwsError> {
    from_bytes(&std::fs::read(path)?)
}

pub fn load_float(path: &Path) -> Result<KwsModel, KwsError> {
    match load(path)? {
        ModelFile::Float(m) => Ok(m),
        ModelFile::Int8(_) => {
            Err(KwsError::FlavorMismatch { expected: "float64", found: "int8".into() })
        }
    }
}

pub fn load_int8(path: &Path) -> Result<QuantizedKwsModel, KwsError> {
    match load(path)? {
        ModelFile::Int8(m) => Ok(m),
        ModelFile::Float(_) => {
            Err(KwsError::FlavorMismatch { expected: "int8", found: "float64".into() })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kws::quant::quantize;
    use rand::Rng;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn model() -> KwsModel {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        KwsModel::init(&mut rng)
    }

    fn calib() -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        (0..8)
            .map(|_| (0..13 * 49).map(|_| rng.random_range(-20.0..5.0)).collect())
            .collect()
    }

    #[test]
    fn float_round_trip_is_exact() {
        let m = model();
        match from_bytes(&to_bytes_float(&m)).unwrap() {
            ModelFile::Float(m2) => assert_eq!(m, m2),
            _ => panic!("wrong flavor"),
        }
    }

    #[test]
    fn int8_round_trip_preserves_outputs() {
        let q = quantize(&model(), &calib());
        let bytes = to_bytes_int8(&q);
        match from_bytes(&bytes).unwrap() {
            ModelFile::Int8(q2) => {
                assert_eq!(q, q2, "derived multipliers must recompute identically");
                let x = &calib()[0];
                assert_eq!(q.forward_logits(x), q2.forward_logits(x));
            }
            _ => panic!("wrong flavor"),
        }
    }

    #[test]
    fn truncation_and_trailing_bytes_are_rejected() {
        let bytes = to_bytes_float(&model());
        assert!(matches!(from_bytes(&bytes[..bytes.len() - 3]), Err(KwsError::BadFormat(_))));
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(matches!(from_bytes(&extra), Err(KwsError::BadFormat(_))));
    }

    #[test]
    fn wrong_magic_and_flavor_mismatch_are_reported() {
        assert!(matches!(from_bytes(b"nope"), Err(KwsError::BadFormat(_))));
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.kws");
        save_float(&model(), &p).unwrap();
        assert!(matches!(
            load_int8(&p),
            Err(KwsError::FlavorMismatch { expected: "int8", .. })
        ));
    }

    #[test]
    fn tensor_length_mismatch_is_reported() {
        let mut bytes = to_bytes_float(&model());
        // Corrupt the first tensor's length field.
        bytes[6] = 99;
        let err = from_bytes(&bytes);
        assert!(matches!(err, Err(KwsError::BadFormat(_))));
    }
}
