use std::path::Path;

use ndarray::Array2;

use crate::data::{FeatureSet, IGNORE_LABEL};
use crate::error::{Error, Result};

const FEAT_MAGIC: &[u8; 8] = b"LGSPFEAT";
const LABEL_MAGIC: &[u8; 8] = b"LGSPLBL\0";
const DEPTH_MAGIC: &[u8; 8] = b"LGSPDPTH";
const VERSION: u32 = 1;

/// Depth image in millimeters, row-major, `0` marks an invalid pixel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DepthMap {
    pub width: u32,
    pub height: u32,
    pub depth_mm: Vec<u16>,
}

impl DepthMap {
    pub fn new(width: u32, height: u32, depth_mm: Vec<u16>) -> Result<Self> {
        if depth_mm.len() != width as usize * height as usize {
            return Err(Error::invalid(format!(
                "depth map {width}x{height} needs {} pixels, got {}",
                width as usize * height as usize,
                depth_mm.len()
            )));
        }
        Ok(DepthMap {
            width,
            height,
            depth_mm,
        })
    }

    /// Depth at pixel `(u, v)` in meters, `None` for zero readings.
    pub fn meters_at(&self, u: usize, v: usize) -> Option<f64> {
        let d = self.depth_mm[v * self.width as usize + u];
        (d != 0).then(|| f64::from(d) / 1000.0)
    }
}

/// Little-endian cursor that reports truncation against the file it reads.
struct Reader<'a> {
    path: &'a Path,
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn new(path: &'a Path, buf: &'a [u8]) -> Self {
        Reader { path, buf, pos: 0 }
    }

    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        match end {
            Some(end) => {
                let out = &self.buf[self.pos..end];
                self.pos = end;
                Ok(out)
            }
            None => Err(Error::parse(
                self.path,
                format!(
                    "truncated {what}: need {n} bytes at offset {}, file has {}",
                    self.pos,
                    self.buf.len()
                ),
            )),
        }
    }

    fn magic(&mut self, expected: &[u8; 8]) -> Result<()> {
        let got = self.take(8, "magic")?;
        if got != expected {
            return Err(Error::parse(
                self.path,
                format!(
                    "magic mismatch: expected {:?}, found {:?}",
                    String::from_utf8_lossy(expected),
                    String::from_utf8_lossy(got)
                ),
            ));
        }
        Ok(())
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1, "u8")?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, "u32")?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, "u64")?.try_into().unwrap()))
    }

    fn version(&mut self) -> Result<()> {
        let v = self.u32()?;
        if v != VERSION {
            return Err(Error::parse(self.path, format!("unsupported version {v}")));
        }
        Ok(())
    }

    fn payload(&mut self, count: usize, width: usize, what: &str) -> Result<&'a [u8]> {
        let bytes = count.checked_mul(width).ok_or_else(|| {
            Error::parse(self.path, format!("{what} size overflows: {count} x {width}"))
        })?;
        self.take(bytes, what)
    }

    fn finish(&self) -> Result<()> {
        if self.pos != self.buf.len() {
            return Err(Error::parse(
                self.path,
                format!(
                    "size mismatch: {} trailing bytes after payload",
                    self.buf.len() - self.pos
                ),
            ));
        }
        Ok(())
    }
}

fn read_all(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::io(path, e))
}

fn write_all(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Reads an LGSPFEAT matrix. Without a mask section every row is valid.
pub fn read_feature_set(path: impl AsRef<Path>) -> Result<FeatureSet> {
    let path = path.as_ref();
    let buf = read_all(path)?;
    let mut r = Reader::new(path, &buf);
    r.magic(FEAT_MAGIC)?;
    r.version()?;
    let rows = usize::try_from(r.u64()?)
        .map_err(|_| Error::parse(path, "row count does not fit in memory"))?;
    let dim = r.u32()? as usize;
    let has_mask = match r.u8()? {
        0 => false,
        1 => true,
        other => return Err(Error::parse(path, format!("has_mask flag must be 0/1, got {other}"))),
    };
    let count = rows
        .checked_mul(dim)
        .ok_or_else(|| Error::parse(path, "rows x dim overflows"))?;
    let payload = r.payload(count, 4, "feature payload")?;
    let values: Vec<f64> = payload
        .chunks_exact(4)
        .map(|c| f64::from(f32::from_le_bytes(c.try_into().unwrap())))
        .collect();
    let valid = if has_mask {
        r.payload(rows, 1, "mask")?
            .iter()
            .enumerate()
            .map(|(i, &b)| match b {
                0 => Ok(false),
                1 => Ok(true),
                other => Err(Error::parse(path, format!("mask byte {other} at row {i}"))),
            })
            .collect::<Result<Vec<_>>>()?
    } else {
        vec![true; rows]
    };
    r.finish()?;
    let values = Array2::from_shape_vec((rows, dim), values).expect("shape checked above");
    let set = FeatureSet::new(values, valid).map_err(|e| Error::parse(path, e.to_string()))?;
    if set.valid_count() == 0 {
        return Err(Error::parse(path, "feature set has no valid rows"));
    }
    Ok(set)
}

/// Writes an LGSPFEAT matrix as f32. The mask section is emitted only when
/// some row is invalid; invalid rows are written as zeros.
pub fn write_feature_set(features: &FeatureSet, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let rows = features.rows();
    let dim = features.dim();
    let has_mask = !features.all_valid();
    let mut out = Vec::with_capacity(25 + rows * dim * 4 + if has_mask { rows } else { 0 });
    out.extend_from_slice(FEAT_MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(rows as u64).to_le_bytes());
    out.extend_from_slice(&u32::try_from(dim).map_err(|_| Error::invalid("dim exceeds u32"))?.to_le_bytes());
    out.push(u8::from(has_mask));
    for (row, &ok) in features.values.outer_iter().zip(&features.valid) {
        for &v in row {
            let v = if ok { v as f32 } else { 0.0 };
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    if has_mask {
        out.extend(features.valid.iter().map(|&v| u8::from(v)));
    }
    write_all(path, &out)
}

/// Reads an LGSPLBL label vector (`-1` = ignore).
pub fn read_labels(path: impl AsRef<Path>) -> Result<Vec<i32>> {
    let path = path.as_ref();
    let buf = read_all(path)?;
    let mut r = Reader::new(path, &buf);
    r.magic(LABEL_MAGIC)?;
    r.version()?;
    let rows = usize::try_from(r.u64()?)
        .map_err(|_| Error::parse(path, "row count does not fit in memory"))?;
    let labels = r
        .payload(rows, 4, "label payload")?
        .chunks_exact(4)
        .map(|c| i32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    r.finish()?;
    Ok(labels)
}

/// Writes an LGSPLBL label vector. With `classes` set, every label must be
/// `-1` or inside `[0, classes)`.
pub fn write_labels(labels: &[i32], classes: Option<usize>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    for (i, &l) in labels.iter().enumerate() {
        if l < IGNORE_LABEL {
            return Err(Error::invalid(format!("label {l} at row {i} is below -1")));
        }
        if let Some(c) = classes {
            if l >= 0 && l as usize >= c {
                return Err(Error::invalid(format!(
                    "label {l} at row {i} is not below the declared class count {c}"
                )));
            }
        }
    }
    let mut out = Vec::with_capacity(20 + labels.len() * 4);
    out.extend_from_slice(LABEL_MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(labels.len() as u64).to_le_bytes());
    for &l in labels {
        out.extend_from_slice(&l.to_le_bytes());
    }
    write_all(path, &out)
}

pub fn read_depth_map(path: impl AsRef<Path>) -> Result<DepthMap> {
    let path = path.as_ref();
    let buf = read_all(path)?;
    let mut r = Reader::new(path, &buf);
    r.magic(DEPTH_MAGIC)?;
    let width = r.u32()?;
    let height = r.u32()?;
    let depth_mm = r
        .payload(width as usize * height as usize, 2, "depth payload")?
        .chunks_exact(2)
        .map(|c| u16::from_le_bytes(c.try_into().unwrap()))
        .collect();
    r.finish()?;
    DepthMap::new(width, height, depth_mm)
}

pub fn write_depth_map(depth: &DepthMap, path: impl AsRef<Path>) -> Result<()> {
    let mut out = Vec::with_capacity(16 + depth.depth_mm.len() * 2);
    out.extend_from_slice(DEPTH_MAGIC);
    out.extend_from_slice(&depth.width.to_le_bytes());
    out.extend_from_slice(&depth.height.to_le_bytes());
    for &d in &depth.depth_mm {
        out.extend_from_slice(&d.to_le_bytes());
    }
    write_all(path.as_ref(), &out)
}
