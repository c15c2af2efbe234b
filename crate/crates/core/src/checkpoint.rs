//! Parameter snapshots: a shapes manifest followed by flat little-endian
//! f64 arrays, groups in the order classifier, encoder, generator,
//! discriminator. Optimizer state is not stored.

use std::path::Path;

use crate::error::{Error, Result};
use crate::nets::{ParamGroup, ParamStore};

pub const MAGIC: &[u8; 4] = b"BGDL";
pub const VERSION: u32 = 1;
const GROUPS: usize = 4;

fn groups(store: &ParamStore) -> [Vec<&crate::Tensor>; GROUPS] {
    [
        store.classifier.params(),
        store.encoder.params(),
        store.generator.params(),
        store.discriminator.params(),
    ]
}

pub fn encode(store: &ParamStore) -> Vec<u8> {
    let groups = groups(store);
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(GROUPS as u32).to_le_bytes());
    for g in &groups {
        out.extend_from_slice(&(g.len() as u32).to_le_bytes());
        for t in g {
            out.extend_from_slice(&(t.shape().len() as u32).to_le_bytes());
            for &d in t.shape() {
                out.extend_from_slice(&(d as u64).to_le_bytes());
            }
        }
    }
    for g in &groups {
        for t in g {
            for v in t.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| Error::Checkpoint(format!("truncated at byte {}", self.pos)))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

/// Overwrites the parameters of `store`, whose architecture must match the
/// manifest exactly.
pub fn decode_into(bytes: &[u8], store: &mut ParamStore) -> Result<()> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4)? != MAGIC {
        return Err(Error::Checkpoint("bad magic".into()));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {version}")));
    }
    let n_groups = r.u32()? as usize;
    if n_groups != GROUPS {
        return Err(Error::Checkpoint(format!("expected {GROUPS} groups, found {n_groups}")));
    }
    let expected: Vec<Vec<Vec<usize>>> = groups(store)
        .iter()
        .map(|g| g.iter().map(|t| t.shape().to_vec()).collect())
        .collect();
    for (gi, want) in expected.iter().enumerate() {
        let count = r.u32()? as usize;
        if count != want.len() {
            return Err(Error::Checkpoint(format!(
                "group {gi}: {count} tensors, expected {}",
                want.len()
            )));
        }
        for (ti, shape) in want.iter().enumerate() {
            let ndim = r.u32()? as usize;
            let dims = (0..ndim)
                .map(|_| r.u64().map(|d| d as usize))
                .collect::<Result<Vec<_>>>()?;
            if &dims != shape {
                return Err(Error::Checkpoint(format!(
                    "group {gi} tensor {ti}: shape {dims:?}, expected {shape:?}"
                )));
            }
        }
    }
    let mut values = Vec::with_capacity(expected.len());
    for want in &expected {
        let mut group = Vec::with_capacity(want.len());
        for shape in want {
            let n: usize = shape.iter().product();
            let raw = r.take(n * 8)?;
            group.push(
                raw.chunks_exact(8)
                    .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
                    .collect::<Vec<_>>(),
            );
        }
        values.push(group);
    }
    if r.pos != bytes.len() {
        return Err(Error::Checkpoint(format!("{} trailing bytes", bytes.len() - r.pos)));
    }
    let targets: [Vec<&mut crate::Tensor>; GROUPS] = [
        store.classifier.params_mut(),
        store.encoder.params_mut(),
        store.generator.params_mut(),
        store.discriminator.params_mut(),
    ];
    for (dst, src) in targets.into_iter().zip(values) {
        for (t, v) in dst.into_iter().zip(src) {
            t.data_mut().copy_from_slice(&v);
        }
    }
    Ok(())
}

pub fn save(path: &Path, store: &ParamStore) -> Result<()> {
    std::fs::write(path, encode(store)).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

pub fn load_into(path: &Path, store: &mut ParamStore) -> Result<()> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    decode_into(&bytes, store)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nets::{NetConfig, OptimizerConfig};
    use crate::rng::StreamKey;

    fn store(seed: u64, hidden: usize) -> ParamStore {
        let mut cfg = NetConfig::desk_default(5, 3);
        cfg.classifier_hidden = vec![hidden];
        cfg.encoder_hidden = 4;
        cfg.generator_hidden = 4;
        cfg.discriminator_hidden = 4;
        cfg.latent_dim = 2;
        ParamStore::init(&cfg, OptimizerConfig::default(), StreamKey::root(seed)).unwrap()
    }

    #[test]
    fn round_trip_restores_every_group() {
        let a = store(1, 6);
        let mut b = store(2, 6);
        assert_ne!(a.classifier, b.classifier);
        decode_into(&encode(&a), &mut b).unwrap();
        assert_eq!(a.classifier, b.classifier);
        assert_eq!(a.encoder, b.encoder);
        assert_eq!(a.generator, b.generator);
        assert_eq!(a.discriminator, b.discriminator);
    }

    #[test]
    fn header_layout() {
        let bytes = encode(&store(1, 6));
        assert_eq!(&bytes[..4], b"BGDL");
        assert_eq!(u32::from_le_bytes(bytes[4..8].try_into().unwrap()), VERSION);
        assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()), 4);
    }

    #[test]
    fn rejects_damage_and_mismatch() {
        let a = store(1, 6);
        let bytes = encode(&a);
        let mut target = store(3, 6);
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(decode_into(&bad, &mut target), Err(Error::Checkpoint(_))));
        assert!(decode_into(&bytes[..bytes.len() - 3], &mut target).is_err());
        let mut long = bytes.clone();
        long.push(0);
        assert!(decode_into(&long, &mut target).is_err());
        let mut other = store(3, 7);
        assert!(decode_into(&bytes, &mut other).is_err());
    }
}
