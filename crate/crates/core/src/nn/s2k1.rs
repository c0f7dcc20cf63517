//! `S2K1` tensor files.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! "S2K1"                      magic
//! u32                         tensor count
//! per tensor:
//!   u16 + UTF-8 bytes         name
//!   u8                        rank
//!   rank x u32                dims
//!   prod(dims) x f32          values, row-major
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"S2K1";

/// One named tensor as stored on disk.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorRecord {
    pub name: String,
    pub dims: Vec<usize>,
    pub values: Vec<f32>,
}

impl TensorRecord {
    pub fn new(name: impl Into<String>, dims: Vec<usize>, values: Vec<f32>) -> Result<Self> {
        let record = Self {
            name: name.into(),
            dims,
            values,
        };
        record.validate()?;
        Ok(record)
    }

    /// Narrows `f64` values to `f32`.
    pub fn from_f64(name: impl Into<String>, dims: Vec<usize>, values: &[f64]) -> Result<Self> {
        Self::new(name, dims, values.iter().map(|&v| v as f32).collect())
    }

    pub fn values_f64(&self) -> Vec<f64> {
        self.values.iter().map(|&v| v as f64).collect()
    }

    fn validate(&self) -> Result<()> {
        if self.name.len() > u16::MAX as usize {
            return Err(Error::Format(format!("tensor name of {} bytes is too long", self.name.len())));
        }
        if self.dims.len() > u8::MAX as usize {
            return Err(Error::Format(format!("rank {} exceeds 255", self.dims.len())));
        }
        if self.dims.iter().any(|&d| d > u32::MAX as usize) {
            return Err(Error::Format(format!("dimension in {:?} exceeds u32", self.dims)));
        }
        let expected: usize = self.dims.iter().product();
        if expected != self.values.len() {
            return Err(Error::Format(format!(
                "tensor `{}` has dims {:?} but {} values",
                self.name,
                self.dims,
                self.values.len()
            )));
        }
        Ok(())
    }
}

pub fn write_tensors<W: Write>(mut w: W, records: &[TensorRecord]) -> Result<()> {
    let io = |e| Error::Format(format!("write failed: {e}"));
    let count = u32::try_from(records.len()).map_err(|_| Error::Format("too many tensors".into()))?;
    w.write_all(MAGIC).map_err(io)?;
    w.write_all(&count.to_le_bytes()).map_err(io)?;
    for r in records {
        r.validate()?;
        w.write_all(&(r.name.len() as u16).to_le_bytes()).map_err(io)?;
        w.write_all(r.name.as_bytes()).map_err(io)?;
        w.write_all(&[r.dims.len() as u8]).map_err(io)?;
        for &d in &r.dims {
            w.write_all(&(d as u32).to_le_bytes()).map_err(io)?;
        }
        let mut buf = Vec::with_capacity(r.values.len() * 4);
        for v in &r.values {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&buf).map_err(io)?;
    }
    w.flush().map_err(io)
}

fn read_exact<R: Read, const N: usize>(r: &mut R, what: &str) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    r.read_exact(&mut buf)
        .map_err(|e| Error::Format(format!("truncated while reading {what}: {e}")))?;
    Ok(buf)
}

pub fn read_tensors<R: Read>(mut r: R) -> Result<Vec<TensorRecord>> {
    let magic: [u8; 4] = read_exact(&mut r, "magic")?;
    if &magic != MAGIC {
        return Err(Error::Format(format!("bad magic {magic:?}")));
    }
    let count = u32::from_le_bytes(read_exact(&mut r, "tensor count")?) as usize;
    let mut records = Vec::with_capacity(count.min(1 << 16));
    for i in 0..count {
        let name_len = u16::from_le_bytes(read_exact(&mut r, "name length")?) as usize;
        let mut name = vec![0u8; name_len];
        r.read_exact(&mut name)
            .map_err(|e| Error::Format(format!("truncated name of tensor {i}: {e}")))?;
        let name = String::from_utf8(name)
            .map_err(|_| Error::Format(format!("name of tensor {i} is not UTF-8")))?;
        let [rank] = read_exact::<_, 1>(&mut r, "rank")?;
        let mut dims = Vec::with_capacity(rank as usize);
        for _ in 0..rank {
            dims.push(u32::from_le_bytes(read_exact(&mut r, "dims")?) as usize);
        }
        let numel = dims
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .ok_or_else(|| Error::Format(format!("dims {dims:?} overflow")))?;
        let mut raw = Vec::new();
        (&mut r)
            .take(numel as u64 * 4)
            .read_to_end(&mut raw)
            .map_err(|e| Error::Format(format!("reading values of `{name}`: {e}")))?;
        if raw.len() != numel * 4 {
            return Err(Error::Format(format!("truncated values of `{name}`")));
        }
        let values = raw
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
            .collect();
        records.push(TensorRecord { name, dims, values });
    }
    let mut probe = [0u8; 1];
    match r.read(&mut probe) {
        Ok(0) => Ok(records),
        Ok(_) => Err(Error::Format("trailing bytes after last tensor".into())),
        Err(e) => Err(Error::Format(e.to_string())),
    }
}

pub fn save_tensors(path: impl AsRef<Path>, records: &[TensorRecord]) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_tensors(BufWriter::new(file), records)
}

pub fn load_tensors(path: impl AsRef<Path>) -> Result<Vec<TensorRecord>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_tensors(BufReader::new(file))
}

/// Finds a record by name.
pub fn find<'a>(records: &'a [TensorRecord], name: &str) -> Result<&'a TensorRecord> {
    records
        .iter()
        .find(|r| r.name == name)
        .ok_or_else(|| Error::Format(format!("missing tensor `{name}`")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn encode(records: &[TensorRecord]) -> Vec<u8> {
        let mut buf = Vec::new();
        write_tensors(&mut buf, records).unwrap();
        buf
    }

    #[test]
    fn empty_list_is_valid() {
        let buf = encode(&[]);
        assert_eq!(buf, b"S2K1\0\0\0\0");
        assert!(read_tensors(buf.as_slice()).unwrap().is_empty());
    }

    #[test]
    fn exact_layout() {
        let r = TensorRecord::new("ab", vec![2], vec![1.0, -2.5]).unwrap();
        let buf = encode(&[r]);
        let mut expected = b"S2K1".to_vec();
        expected.extend_from_slice(&1u32.to_le_bytes());
        expected.extend_from_slice(&2u16.to_le_bytes());
        expected.extend_from_slice(b"ab");
        expected.push(1);
        expected.extend_from_slice(&2u32.to_le_bytes());
        expected.extend_from_slice(&1.0f32.to_le_bytes());
        expected.extend_from_slice(&(-2.5f32).to_le_bytes());
        assert_eq!(buf, expected);
    }

    #[test]
    fn corrupt_inputs_are_typed_errors() {
        let good = encode(&[TensorRecord::new("w", vec![2, 2], vec![0.0; 4]).unwrap()]);
        let mut bad = good.clone();
        bad[0] = b'X';
        assert!(matches!(read_tensors(bad.as_slice()), Err(Error::Format(_))));
        assert!(matches!(
            read_tensors(&good[..good.len() - 1]),
            Err(Error::Format(_))
        ));
        let mut long = good.clone();
        long.push(0);
        assert!(matches!(read_tensors(long.as_slice()), Err(Error::Format(_))));
        assert!(TensorRecord::new("x", vec![3], vec![0.0; 2]).is_err());
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.s2k1");
        let records = vec![
            TensorRecord::new("a", vec![2, 3], (0..6).map(|i| i as f32 * 0.1).collect()).unwrap(),
            TensorRecord::new("scalar", vec![], vec![f32::NAN]).unwrap(),
        ];
        save_tensors(&path, &records).unwrap();
        let back = load_tensors(&path).unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back[0], records[0]);
        assert_eq!(back[1].values[0].to_bits(), f32::NAN.to_bits());
    }

    proptest! {
        #[test]
        fn round_trip_is_bitwise(
            name in "[a-z._0-9]{0,12}",
            dims in prop::collection::vec(1usize..4, 0..4),
            seed in any::<u32>(),
        ) {
            let n: usize = dims.iter().product();
            let values: Vec<f32> = (0..n)
                .map(|i| f32::from_bits(seed.wrapping_mul(2_654_435_761).wrapping_add(i as u32 * 97)))
                .collect();
            let r = TensorRecord::new(name, dims, values).unwrap();
            let buf = encode(std::slice::from_ref(&r));
            let back = read_tensors(buf.as_slice()).unwrap();
            prop_assert_eq!(back.len(), 1);
            prop_assert_eq!(&back[0].name, &r.name);
            prop_assert_eq!(&back[0].dims, &r.dims);
            let a: Vec<u32> = back[0].values.iter().map(|v| v.to_bits()).collect();
            let b: Vec<u32> = r.values.iter().map(|v| v.to_bits()).collect();
            prop_assert_eq!(a, b);
            prop_assert_eq!(encode(&back), buf);
        }
    }
}
