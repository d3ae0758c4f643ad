//! Binary checkpoint format, version 1 (all integers little-endian):
//!
//! ```text
//! magic      b"BCOTPOL\0"
//! version    u32
//! vocab      u32 total, u32 text_start, u32 text_end, u32 image_start, u32 image_end
//! model      u32 d_model, u32 d_hidden, u32 max_prefix, u32 image_len
//! tensors    u32 count, then per tensor: u8 name_len, name, u32 rows, u32 cols
//! data       u64 count, then count f64 values
//! checksum   u32 CRC-32 of every preceding byte
//! ```

use std::fs;
use std::io::Write;
use std::path::Path;

use super::params::{ModelConfig, PolicyParams, VocabLayout, N_TENSORS, TENSOR_NAMES};
use super::PolicyError;

pub const MAGIC: &[u8; 8] = b"BCOTPOL\0";
pub const FORMAT_VERSION: u32 = 1;

pub fn encode(params: &PolicyParams) -> Vec<u8> {
    encode_with_version(params, FORMAT_VERSION)
}

pub(crate) fn encode_with_version(params: &PolicyParams, version: u32) -> Vec<u8> {
    let mut buf = Vec::with_capacity(64 + params.data.len() * 8);
    buf.extend_from_slice(MAGIC);
    let l = &params.layout;
    let c = &params.config;
    for x in [version, l.total as u32, l.text.start, l.text.end, l.image.start, l.image.end] {
        buf.extend_from_slice(&x.to_le_bytes());
    }
    for x in [c.d_model, c.d_hidden, c.max_prefix, c.image_len] {
        buf.extend_from_slice(&(x as u32).to_le_bytes());
    }
    buf.extend_from_slice(&(N_TENSORS as u32).to_le_bytes());
    for (name, (r, c)) in TENSOR_NAMES.iter().zip(PolicyParams::tensor_shapes(c, l.total)) {
        buf.push(name.len() as u8);
        buf.extend_from_slice(name.as_bytes());
        buf.extend_from_slice(&(r as u32).to_le_bytes());
        buf.extend_from_slice(&(c as u32).to_le_bytes());
    }
    buf.extend_from_slice(&(params.data.len() as u64).to_le_bytes());
    for x in &params.data {
        buf.extend_from_slice(&x.to_le_bytes());
    }
    let crc = crc32fast::hash(&buf);
    buf.extend_from_slice(&crc.to_le_bytes());
    buf
}

struct Reader<'a> {
    buf: &'a [u8],
    at: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8], PolicyError> {
        let s = self.buf.get(self.at..self.at + n).ok_or(PolicyError::CorruptChecksum)?;
        self.at += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, PolicyError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, PolicyError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

pub fn decode(bytes: &[u8]) -> Result<PolicyParams, PolicyError> {
    if bytes.len() < MAGIC.len() + 4 || &bytes[..MAGIC.len()] != MAGIC {
        return Err(PolicyError::BadMagic);
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
    if version != FORMAT_VERSION {
        return Err(PolicyError::VersionMismatch { found: version, expected: FORMAT_VERSION });
    }
    if bytes.len() < 16 {
        return Err(PolicyError::CorruptChecksum);
    }
    let (body, tail) = bytes.split_at(bytes.len() - 4);
    if crc32fast::hash(body) != u32::from_le_bytes(tail.try_into().unwrap()) {
        return Err(PolicyError::CorruptChecksum);
    }
    let mut r = Reader { buf: body, at: 12 };
    let total = r.u32()? as usize;
    let text = r.u32()?..r.u32()?;
    let image = r.u32()?..r.u32()?;
    let layout = VocabLayout { total, text, image };
    let config = ModelConfig { d_model: r.u32()? as usize, d_hidden: r.u32()? as usize, max_prefix: r.u32()? as usize, image_len: r.u32()? as usize };
    let shapes = PolicyParams::tensor_shapes(&config, total);
    if r.u32()? as usize != N_TENSORS {
        return Err(PolicyError::Format("tensor count".into()));
    }
    for (name, (rows, cols)) in TENSOR_NAMES.iter().zip(shapes) {
        let len = r.take(1)?[0] as usize;
        let got = r.take(len)?;
        if got != name.as_bytes() || r.u32()? as usize != rows || r.u32()? as usize != cols {
            return Err(PolicyError::Format(format!("tensor table entry `{name}`")));
        }
    }
    let count = r.u64()? as usize;
    if count != PolicyParams::n_params(&config, total) {
        return Err(PolicyError::Format("parameter count".into()));
    }
    let raw = r.take(count * 8)?;
    let data: Vec<f64> = raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    if r.at != body.len() {
        return Err(PolicyError::Format("trailing bytes".into()));
    }
    PolicyParams::from_raw(config, layout, data).ok_or_else(|| PolicyError::Format("shape".into()))
}

/// Writes through a temporary sibling file and renames it into place.
pub fn save_checkpoint(params: &PolicyParams, path: &Path) -> Result<(), PolicyError> {
    let tmp = path.with_extension("tmp");
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(&encode(params))?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<PolicyParams, PolicyError> {
    decode(&fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::Vocab;

    fn params(seed: u64) -> PolicyParams {
        let vocab = Vocab::new(&["a", "b", "c"], 2, 2).unwrap();
        let cfg = ModelConfig { d_model: 4, d_hidden: 5, max_prefix: 6, image_len: 4 };
        PolicyParams::init(cfg, &vocab, seed)
    }

    #[test]
    fn round_trip_is_bit_exact() {
        for seed in 0..5 {
            let p = params(seed);
            let q = decode(&encode(&p)).unwrap();
            assert_eq!(p.data.iter().map(|x| x.to_bits()).collect::<Vec<_>>(), q.data.iter().map(|x| x.to_bits()).collect::<Vec<_>>());
            assert_eq!(p, q);
        }
    }

    #[test]
    fn truncated_file_is_corrupt() {
        let bytes = encode(&params(0));
        for cut in [bytes.len() - 1, bytes.len() - 9, 20] {
            assert!(matches!(decode(&bytes[..cut]), Err(PolicyError::CorruptChecksum)), "cut {cut}");
        }
    }

    #[test]
    fn flipped_byte_is_corrupt() {
        let mut bytes = encode(&params(0));
        let mid = bytes.len() / 2;
        bytes[mid] ^= 0x10;
        assert!(matches!(decode(&bytes), Err(PolicyError::CorruptChecksum)));
    }

    #[test]
    fn version_gate() {
        let p = params(0);
        assert!(decode(&encode_with_version(&p, 1)).is_ok());
        assert!(matches!(decode(&encode_with_version(&p, 2)), Err(PolicyError::VersionMismatch { found: 2, .. })));
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.ckpt");
        let p = params(3);
        save_checkpoint(&p, &path).unwrap();
        assert_eq!(load_checkpoint(&path).unwrap(), p);
        assert!(matches!(load_checkpoint(&dir.path().join("missing")), Err(PolicyError::Io(_))));
    }
}
