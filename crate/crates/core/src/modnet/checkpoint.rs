//! Binary registry checkpoints.
//!
//! Layout (little-endian): `b"SYNM"`, version `u32`, architecture tag `u8`
//! (0 linear, 1 nonlin, 2 double), D `u32`, module count `u32`; then per
//! module in key order: key length `u16`, UTF-8 key, fan-in `u16`, and
//! W1, b1 (then W2, b2 for double) as row-major `f32`.

use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{Architecture, ModuleParams, ModuleRegistry};
use crate::autodiff::Tensor;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"SYNM";
pub const VERSION: u32 = 1;

fn corrupt(msg: impl Into<String>) -> Error {
    Error::Checkpoint(msg.into())
}

pub fn save_checkpoint<W: Write>(registry: &ModuleRegistry, out: W) -> Result<()> {
    let mut out = BufWriter::new(out);
    out.write_all(MAGIC)?;
    out.write_all(&VERSION.to_le_bytes())?;
    out.write_all(&[registry.arch().tag()])?;
    let dim = u32::try_from(registry.dim()).map_err(|_| corrupt("dimension exceeds u32"))?;
    out.write_all(&dim.to_le_bytes())?;
    let count = u32::try_from(registry.len()).map_err(|_| corrupt("too many modules"))?;
    out.write_all(&count.to_le_bytes())?;
    for m in registry.iter() {
        let key = m.key().as_bytes();
        let klen = u16::try_from(key.len()).map_err(|_| corrupt(format!("key `{}` too long", m.key())))?;
        let fan_in = u16::try_from(m.fan_in()).map_err(|_| corrupt("fan-in exceeds u16"))?;
        out.write_all(&klen.to_le_bytes())?;
        out.write_all(key)?;
        out.write_all(&fan_in.to_le_bytes())?;
        for &s in m.slots() {
            for &v in m.tensor(s).expect("slot listed").as_slice() {
                out.write_all(&(v as f32).to_le_bytes())?;
            }
        }
    }
    out.flush()?;
    Ok(())
}

fn read_exact<const N: usize>(r: &mut impl Read) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    r.read_exact(&mut buf).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => corrupt("truncated file"),
        _ => Error::Io(e),
    })?;
    Ok(buf)
}

fn read_tensor(r: &mut impl Read, rows: usize, cols: usize) -> Result<Tensor> {
    let mut data = Vec::with_capacity(rows * cols);
    for _ in 0..rows * cols {
        data.push(f32::from_le_bytes(read_exact::<4>(r)?) as f64);
    }
    Tensor::new(rows, cols, data).map_err(|_| corrupt("non-finite weight"))
}

/// Load a registry. The POS layer is taken to be on when any key is a
/// bare tag (no `->`) or the file holds no modules. The init seed is not
/// stored; the loaded registry uses seed 0.
pub fn load_checkpoint<R: Read>(input: R) -> Result<ModuleRegistry> {
    let mut r = BufReader::new(input);
    if &read_exact::<4>(&mut r)? != MAGIC {
        return Err(corrupt("bad magic"));
    }
    let version = u32::from_le_bytes(read_exact(&mut r)?);
    if version != VERSION {
        return Err(corrupt(format!("unsupported version {version}")));
    }
    let [tag] = read_exact::<1>(&mut r)?;
    let arch = Architecture::from_tag(tag).ok_or_else(|| corrupt(format!("unknown architecture tag {tag}")))?;
    let dim = u32::from_le_bytes(read_exact(&mut r)?) as usize;
    if dim == 0 {
        return Err(corrupt("dimension is zero"));
    }
    let count = u32::from_le_bytes(read_exact(&mut r)?) as usize;

    let mut modules = Vec::with_capacity(count.min(1 << 16));
    for _ in 0..count {
        let klen = u16::from_le_bytes(read_exact(&mut r)?) as usize;
        let mut key = vec![0u8; klen];
        r.read_exact(&mut key).map_err(|_| corrupt("truncated key"))?;
        let key = String::from_utf8(key).map_err(|_| corrupt("key is not UTF-8"))?;
        let fan_in = u16::from_le_bytes(read_exact(&mut r)?) as usize;
        if fan_in == 0 {
            return Err(corrupt(format!("module `{key}` has fan-in 0")));
        }
        let w1 = read_tensor(&mut r, dim, fan_in * dim)?;
        let b1 = read_tensor(&mut r, 1, dim)?;
        let second = if arch.has_second_layer() {
            Some((read_tensor(&mut r, dim, dim)?, read_tensor(&mut r, 1, dim)?))
        } else {
            None
        };
        modules.push(ModuleParams::from_parts(key, arch, fan_in, dim, w1, b1, second)?);
    }
    let mut trailing = [0u8; 1];
    if r.read(&mut trailing)? != 0 {
        return Err(corrupt("trailing bytes"));
    }

    let pos_layer = modules.is_empty() || modules.iter().any(|m| !m.key().contains("->"));
    let mut registry = ModuleRegistry::new(dim, arch, 0).with_pos_layer(pos_layer);
    for m in modules {
        if registry.contains(m.key()) {
            return Err(corrupt(format!("duplicate key `{}`", m.key())));
        }
        registry.insert(m)?;
    }
    Ok(registry)
}

pub fn write_checkpoint(registry: &ModuleRegistry, path: impl AsRef<Path>) -> Result<()> {
    save_checkpoint(registry, std::fs::File::create(path)?)
}

pub fn read_checkpoint(path: impl AsRef<Path>) -> Result<ModuleRegistry> {
    load_checkpoint(std::fs::File::open(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::treebank::parse_tree;

    fn sample(arch: Architecture) -> ModuleRegistry {
        let mut reg = ModuleRegistry::new(3, arch, 4);
        reg.ensure_tree(&parse_tree("(S (NP (DT the) (NN dog)) (VP (VBZ runs)))").unwrap()).unwrap();
        reg
    }

    fn bytes(reg: &ModuleRegistry) -> Vec<u8> {
        let mut buf = Vec::new();
        save_checkpoint(reg, &mut buf).unwrap();
        buf
    }

    #[test]
    fn header_layout() {
        let reg = sample(Architecture::Double);
        let buf = bytes(&reg);
        assert_eq!(&buf[0..4], b"SYNM");
        assert_eq!(u32::from_le_bytes(buf[4..8].try_into().unwrap()), 1);
        assert_eq!(buf[8], 2);
        assert_eq!(u32::from_le_bytes(buf[9..13].try_into().unwrap()), 3);
        assert_eq!(u32::from_le_bytes(buf[13..17].try_into().unwrap()), 6);
        // First key in sorted order is "DT".
        assert_eq!(u16::from_le_bytes(buf[17..19].try_into().unwrap()), 2);
        assert_eq!(&buf[19..21], b"DT");
        assert_eq!(u16::from_le_bytes(buf[21..23].try_into().unwrap()), 1);
        let per_module = |n: usize| 2 + 2 + 4 * (3 * 3 * n + 3 + 9 + 3);
        let keys = ["DT", "NN", "NP -> DT NN", "S -> NP VP", "VBZ", "VP -> VBZ"];
        let fan = [1, 1, 2, 2, 1, 1];
        let expected: usize = 17 + keys.iter().zip(fan).map(|(k, n)| per_module(n) + k.len()).sum::<usize>();
        assert_eq!(buf.len(), expected);
    }

    #[test]
    fn round_trip_each_architecture() {
        for arch in Architecture::ALL {
            let reg = sample(arch);
            let back = load_checkpoint(bytes(&reg).as_slice()).unwrap();
            assert_eq!(back, reg, "{arch}");
            assert!(back.pos_layer());
        }
    }

    #[test]
    fn rejects_corruption() {
        let buf = bytes(&sample(Architecture::Linear));
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(matches!(load_checkpoint(bad.as_slice()), Err(Error::Checkpoint(_))));
        let mut bad = buf.clone();
        bad[8] = 7;
        assert!(load_checkpoint(bad.as_slice()).is_err());
        assert!(load_checkpoint(&buf[..buf.len() - 3]).is_err());
        let mut long = buf.clone();
        long.push(0);
        assert!(load_checkpoint(long.as_slice()).is_err());
    }

    #[test]
    fn pos_layer_inferred() {
        let mut reg = ModuleRegistry::new(2, Architecture::Linear, 0).with_pos_layer(false);
        reg.ensure_tree(&parse_tree("(NP (DT a) (NN b))").unwrap()).unwrap();
        let back = load_checkpoint(bytes(&reg).as_slice()).unwrap();
        assert!(!back.pos_layer());
        assert_eq!(back, reg);
    }
}
