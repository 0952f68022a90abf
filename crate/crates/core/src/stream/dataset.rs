use std::fs;
use std::path::Path;

use crate::error::{invalid, Result};
use crate::netcore::checkpoint::Cursor;
use crate::netcore::Tensor;

use super::source::Dataset;

pub const DATASET_MAGIC: &[u8; 4] = b"BEED";
pub const DATASET_VERSION: u32 = 1;

fn u32_of(v: usize, what: &str) -> Result<u32> {
    u32::try_from(v).or_else(|_| invalid(format!("{what} {v} does not fit in u32")))
}

/// Serialise a dataset. Domain ids, when present, follow the labels.
pub fn encode_dataset(ds: &Dataset) -> Result<Vec<u8>> {
    let n = ds.len();
    let mut out = Vec::with_capacity(20 + n * (ds.dim() * 8 + 8));
    out.extend_from_slice(DATASET_MAGIC);
    for v in [DATASET_VERSION, u32_of(n, "sample count")?, u32_of(ds.dim(), "dimension")?, u32_of(ds.classes, "class count")?] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for x in ds.features.data() {
        out.extend_from_slice(&x.to_le_bytes());
    }
    for l in &ds.labels {
        out.extend_from_slice(&l.to_le_bytes());
    }
    if let Some(d) = &ds.domains {
        for v in d {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

pub fn decode_dataset(bytes: &[u8]) -> Result<Dataset> {
    let mut c = Cursor::new(bytes, "dataset");
    c.magic(DATASET_MAGIC)?;
    c.version(DATASET_VERSION)?;
    let n = c.u32("sample count")? as usize;
    let d = c.u32("dimension")? as usize;
    let classes = c.u32("class count")? as usize;
    let feats = c.f64s(n.saturating_mul(d), "features")?;
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let l = c.u32("label")?;
        if l as usize >= classes {
            return c.fail(format!("label {l} outside 0..{classes}"));
        }
        labels.push(l);
    }
    let domains = if c.remaining() == 0 {
        None
    } else {
        let mut ids = Vec::with_capacity(n);
        for _ in 0..n {
            ids.push(c.u32("domain id")?);
        }
        Some(ids)
    };
    c.finish()?;
    Dataset::new(Tensor::new(vec![n, d], feats)?, labels, classes, domains)
}

pub fn save_dataset(ds: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, encode_dataset(ds)?)?;
    Ok(())
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    decode_dataset(&fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Error;

    fn ds(domains: bool) -> Dataset {
        Dataset::new(
            Tensor::matrix(3, 2, vec![0.1, -2.5, f64::MIN_POSITIVE, 3.0, 1e300, -0.0]),
            vec![0, 2, 1],
            3,
            domains.then(|| vec![0, 0, 1]),
        )
        .unwrap()
    }

    #[test]
    fn round_trip_is_bit_exact() {
        for with in [false, true] {
            let bytes = encode_dataset(&ds(with)).unwrap();
            let back = decode_dataset(&bytes).unwrap();
            assert_eq!(encode_dataset(&back).unwrap(), bytes);
            assert_eq!(back.domains.is_some(), with);
        }
    }

    #[test]
    fn truncation_and_bad_labels_rejected() {
        let bytes = encode_dataset(&ds(false)).unwrap();
        assert!(matches!(decode_dataset(&bytes[..30]), Err(Error::Format { .. })));
        let mut bad = bytes.clone();
        let label_at = 20 + 6 * 8;
        bad[label_at] = 7;
        assert!(matches!(decode_dataset(&bad), Err(Error::Format { pos, .. }) if pos as usize == label_at + 4));
        let mut magic = bytes;
        magic[0] = b'X';
        assert!(matches!(decode_dataset(&magic), Err(Error::Format { pos: 0, .. })));
    }
}
