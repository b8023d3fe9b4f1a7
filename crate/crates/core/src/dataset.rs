//! MNIST ingestion, 28×28 → 32×32 preprocessing, and measurement datasets.

use std::io::Read;
use std::path::{Path, PathBuf};

use flate2::read::GzDecoder;
use ndarray::Array2;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::hadamard::{apply_mask, measure_full, HadamardOrder, ImageObject, SelectionMask};

pub const RAW_SIDE: usize = 28;
pub const RAW_LEN: usize = RAW_SIDE * RAW_SIDE;
pub const OBJECT_SIDE: usize = 32;
pub const REDUCED_PER_CLASS: usize = 640;

const IMAGE_MAGIC: u32 = 0x0000_0803;
const LABEL_MAGIC: u32 = 0x0000_0801;

/// Read a file, transparently inflating gzip content.
fn read_maybe_gz(path: &Path) -> Result<Vec<u8>> {
    let raw = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    if raw.starts_with(&[0x1f, 0x8b]) {
        let mut out = Vec::new();
        GzDecoder::new(&raw[..])
            .read_to_end(&mut out)
            .map_err(|e| Error::io(path, e))?;
        Ok(out)
    } else {
        Ok(raw)
    }
}

fn be_u32(path: &Path, bytes: &[u8], offset: usize) -> Result<u32> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_be_bytes(b.try_into().unwrap()))
        .ok_or_else(|| Error::format(path, offset as u64, "truncated header"))
}

/// Raw 28×28 images from an IDX3 file, 784 bytes each.
pub fn load_idx_images(path: &Path) -> Result<Vec<Vec<u8>>> {
    let bytes = read_maybe_gz(path)?;
    parse_idx_images(path, &bytes)
}

pub fn parse_idx_images(path: &Path, bytes: &[u8]) -> Result<Vec<Vec<u8>>> {
    let magic = be_u32(path, bytes, 0)?;
    if magic != IMAGE_MAGIC {
        return Err(Error::format(
            path,
            0,
            format!("magic {magic:#010x}, expected {IMAGE_MAGIC:#010x} (images)"),
        ));
    }
    let count = be_u32(path, bytes, 4)? as usize;
    let rows = be_u32(path, bytes, 8)? as usize;
    let cols = be_u32(path, bytes, 12)? as usize;
    if rows != RAW_SIDE || cols != RAW_SIDE {
        return Err(Error::format(
            path,
            8,
            format!("image dims {rows}x{cols}, expected 28x28"),
        ));
    }
    let body = &bytes[16..];
    let need = count * RAW_LEN;
    if body.len() < need {
        return Err(Error::format(
            path,
            bytes.len() as u64,
            format!("truncated: header promises {count} images ({} bytes)", 16 + need),
        ));
    }
    Ok(body[..need].chunks_exact(RAW_LEN).map(<[u8]>::to_vec).collect())
}

/// Labels from an IDX1 file; every label must be a digit.
pub fn load_idx_labels(path: &Path) -> Result<Vec<u8>> {
    let bytes = read_maybe_gz(path)?;
    parse_idx_labels(path, &bytes)
}

pub fn parse_idx_labels(path: &Path, bytes: &[u8]) -> Result<Vec<u8>> {
    let magic = be_u32(path, bytes, 0)?;
    if magic != LABEL_MAGIC {
        return Err(Error::format(
            path,
            0,
            format!("magic {magic:#010x}, expected {LABEL_MAGIC:#010x} (labels)"),
        ));
    }
    let count = be_u32(path, bytes, 4)? as usize;
    let body = &bytes[8..];
    if body.len() < count {
        return Err(Error::format(
            path,
            bytes.len() as u64,
            format!("truncated: header promises {count} labels"),
        ));
    }
    if let Some(pos) = body[..count].iter().position(|&l| l > 9) {
        return Err(Error::format(
            path,
            8 + pos as u64,
            format!("label {} out of range 0..=9", body[pos]),
        ));
    }
    Ok(body[..count].to_vec())
}

/// How 28×28 digits are brought to 32×32.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Resize {
    /// Two-pixel zero border on every side.
    #[default]
    Pad,
    /// Bilinear resampling with half-pixel centers.
    Bilinear,
}

impl std::str::FromStr for Resize {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pad" => Ok(Resize::Pad),
            "bilinear" => Ok(Resize::Bilinear),
            _ => Err(Error::Argument(format!("unknown resize mode {s:?}"))),
        }
    }
}

/// Scale bytes into `[0, 1]` and resize to a 32×32 object.
pub fn preprocess(raw: &[u8], resize: Resize) -> Result<ImageObject> {
    if raw.len() != RAW_LEN {
        return Err(Error::Dimension(format!(
            "raw image has {} bytes, expected {RAW_LEN}",
            raw.len()
        )));
    }
    let scaled: Vec<f64> = raw.iter().map(|&b| f64::from(b) / 255.0).collect();
    let pixels = match resize {
        Resize::Pad => {
            let off = (OBJECT_SIDE - RAW_SIDE) / 2;
            let mut out = vec![0.0; OBJECT_SIDE * OBJECT_SIDE];
            for (r, row) in scaled.chunks_exact(RAW_SIDE).enumerate() {
                let start = (r + off) * OBJECT_SIDE + off;
                out[start..start + RAW_SIDE].copy_from_slice(row);
            }
            out
        }
        Resize::Bilinear => bilinear(&scaled, RAW_SIDE, OBJECT_SIDE),
    };
    ImageObject::new(OBJECT_SIDE, pixels)
}

fn bilinear(src: &[f64], from: usize, to: usize) -> Vec<f64> {
    let scale = from as f64 / to as f64;
    let coord = |d: usize| {
        let s = ((d as f64 + 0.5) * scale - 0.5).clamp(0.0, (from - 1) as f64);
        let lo = s.floor() as usize;
        let hi = (lo + 1).min(from - 1);
        (lo, hi, s - lo as f64)
    };
    let mut out = Vec::with_capacity(to * to);
    for y in 0..to {
        let (y0, y1, fy) = coord(y);
        for x in 0..to {
            let (x0, x1, fx) = coord(x);
            let top = src[y0 * from + x0] * (1.0 - fx) + src[y0 * from + x1] * fx;
            let bot = src[y1 * from + x0] * (1.0 - fx) + src[y1 * from + x1] * fx;
            out.push((top * (1.0 - fy) + bot * fy).clamp(0.0, 1.0));
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledImage {
    pub image: ImageObject,
    pub label: u8,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitName {
    Train,
    Test,
}

impl SplitName {
    fn file_prefix(self) -> &'static str {
        match self {
            SplitName::Train => "train",
            SplitName::Test => "t10k",
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SplitName::Train => "train",
            SplitName::Test => "test",
        }
    }
}

impl std::str::FromStr for SplitName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(SplitName::Train),
            "test" => Ok(SplitName::Test),
            _ => Err(Error::Argument(format!("unknown split {s:?}"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct DatasetSplit {
    pub name: SplitName,
    pub items: Vec<LabeledImage>,
}

impl DatasetSplit {
    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// First `n` items, in order.
    pub fn truncated(&self, n: usize) -> Self {
        Self {
            name: self.name,
            items: self.items.iter().take(n).cloned().collect(),
        }
    }

    pub fn class_histogram(&self) -> [usize; 10] {
        let mut h = [0; 10];
        for it in &self.items {
            h[usize::from(it.label)] += 1;
        }
        h
    }
}

fn idx_path(dir: &Path, name: &str) -> PathBuf {
    let gz = dir.join(format!("{name}.gz"));
    if gz.exists() {
        gz
    } else {
        dir.join(name)
    }
}

/// Load one MNIST split from `dir` (plain or `.gz` IDX files).
pub fn load_split(dir: &Path, split: SplitName, resize: Resize) -> Result<DatasetSplit> {
    let prefix = split.file_prefix();
    let img_path = idx_path(dir, &format!("{prefix}-images-idx3-ubyte"));
    let lbl_path = idx_path(dir, &format!("{prefix}-labels-idx1-ubyte"));
    let raw = load_idx_images(&img_path)?;
    let labels = load_idx_labels(&lbl_path)?;
    if raw.len() != labels.len() {
        return Err(Error::format(
            &lbl_path,
            4,
            format!("{} labels for {} images", labels.len(), raw.len()),
        ));
    }
    let items = raw
        .par_iter()
        .zip(labels.par_iter())
        .map(|(r, &label)| preprocess(r, resize).map(|image| LabeledImage { image, label }))
        .collect::<Result<Vec<_>>>()?;
    Ok(DatasetSplit { name: split, items })
}

/// First `per_class` zeros followed by the first `per_class` ones.
///
/// `None` keeps every zero and one.
pub fn two_class_subset(split: &DatasetSplit, per_class: Option<usize>) -> Result<DatasetSplit> {
    let pick = |label: u8| -> Vec<LabeledImage> {
        let it = split.items.iter().filter(|x| x.label == label).cloned();
        match per_class {
            Some(n) => it.take(n).collect(),
            None => it.collect(),
        }
    };
    let zeros = pick(0);
    let ones = pick(1);
    if let Some(n) = per_class {
        if zeros.len() < n || ones.len() < n {
            return Err(Error::Argument(format!(
                "need {n} zeros and {n} ones, split has {} and {}",
                zeros.len(),
                ones.len()
            )));
        }
    }
    Ok(DatasetSplit {
        name: split.name,
        items: zeros.into_iter().chain(ones).collect(),
    })
}

/// The 640-zeros + 640-ones reconstruction subset.
pub fn build_reduced_dataset(split: &DatasetSplit) -> Result<DatasetSplit> {
    two_class_subset(split, Some(REDUCED_PER_CLASS))
}

/// Masked measurement features (plus optional pixel targets) for a split.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementDataset {
    pub features: Array2<f64>,
    pub labels: Vec<u8>,
    pub targets: Option<Array2<f64>>,
    pub mask: SelectionMask,
}

impl MeasurementDataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn width(&self) -> usize {
        self.features.ncols()
    }

    /// Row subset, in the given order.
    pub fn select(&self, rows: &[usize]) -> Self {
        Self {
            features: self.features.select(ndarray::Axis(0), rows),
            labels: rows.iter().map(|&r| self.labels[r]).collect(),
            targets: self
                .targets
                .as_ref()
                .map(|t| t.select(ndarray::Axis(0), rows)),
            mask: self.mask.clone(),
        }
    }
}

pub fn build_measurement_dataset(
    split: &DatasetSplit,
    mask: &SelectionMask,
    with_targets: bool,
) -> Result<MeasurementDataset> {
    let order = HadamardOrder::from_side(OBJECT_SIDE)?;
    if mask.order() != order {
        return Err(Error::Dimension(format!(
            "mask is for length {}, objects have {}",
            mask.order().n_total(),
            order.n_total()
        )));
    }
    let rows = split
        .items
        .par_iter()
        .map(|it| Ok(apply_mask(&measure_full(&it.image)?, mask)?.values().to_vec()))
        .collect::<Result<Vec<_>>>()?;
    let n = rows.len();
    let m = mask.len();
    let features = Array2::from_shape_vec((n, m), rows.concat())
        .map_err(|e| Error::Dimension(e.to_string()))?;
    let targets = with_targets
        .then(|| {
            let flat: Vec<f64> = split
                .items
                .iter()
                .flat_map(|it| it.image.pixels().iter().copied())
                .collect();
            Array2::from_shape_vec((n, order.n_total()), flat)
        })
        .transpose()
        .map_err(|e| Error::Dimension(e.to_string()))?;
    Ok(MeasurementDataset {
        features,
        labels: split.items.iter().map(|it| it.label).collect(),
        targets,
        mask: mask.clone(),
    })
}

const CACHE_MAGIC: &[u8; 4] = b"SPQM";
const CACHE_VERSION: u32 = 1;

/// Serialize to the `.spqm` cache layout (little-endian throughout).
///
/// `SPQM | version u32 | rows u64 | cols u64 | target_cols u64 | n_total u64 |
/// mask indices (cols × u64) | mask variances (cols × f64) | features | labels (rows × u8) | targets`
pub fn encode_cache(ds: &MeasurementDataset) -> Vec<u8> {
    let (rows, cols) = ds.features.dim();
    let tcols = ds.targets.as_ref().map_or(0, |t| t.ncols());
    let mut out = Vec::with_capacity(40 + 16 * cols + 8 * rows * (cols + tcols) + rows);
    out.extend_from_slice(CACHE_MAGIC);
    out.extend_from_slice(&CACHE_VERSION.to_le_bytes());
    for v in [rows, cols, tcols, ds.mask.order().n_total()] {
        out.extend_from_slice(&(v as u64).to_le_bytes());
    }
    for &i in ds.mask.indices() {
        out.extend_from_slice(&(i as u64).to_le_bytes());
    }
    for &v in ds.mask.variances() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for &v in ds.features.iter() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out.extend_from_slice(&ds.labels);
    if let Some(t) = &ds.targets {
        for &v in t.iter() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Cursor<'a> {
    path: &'a Path,
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::format(self.path, self.bytes.len() as u64, "truncated cache"))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<usize> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()) as usize)
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let bytes = self.take(n.checked_mul(8).ok_or_else(|| {
            Error::format(self.path, self.pos as u64, "implausible dimensions")
        })?)?;
        Ok(bytes
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
            .collect())
    }
}

pub fn decode_cache(path: &Path, bytes: &[u8]) -> Result<MeasurementDataset> {
    let mut cur = Cursor { path, bytes, pos: 0 };
    if cur.take(4)? != CACHE_MAGIC {
        return Err(Error::format(path, 0, "not an SPQM cache"));
    }
    let version = cur.u32()?;
    if version != CACHE_VERSION {
        return Err(Error::format(path, 4, format!("unsupported cache version {version}")));
    }
    let rows = cur.u64()?;
    let cols = cur.u64()?;
    let tcols = cur.u64()?;
    let n_total = cur.u64()?;
    let order = HadamardOrder::from_len(n_total)?;
    let indices = (0..cols).map(|_| cur.u64()).collect::<Result<Vec<_>>>()?;
    let variances = cur.f64s(cols)?;
    let mask = SelectionMask::new(order, indices, variances)?;
    let feats = cur.f64s(rows * cols)?;
    let labels = cur.take(rows)?.to_vec();
    let targets = if tcols > 0 {
        Some(
            Array2::from_shape_vec((rows, tcols), cur.f64s(rows * tcols)?)
                .map_err(|e| Error::Dimension(e.to_string()))?,
        )
    } else {
        None
    };
    if cur.pos != bytes.len() {
        return Err(Error::format(path, cur.pos as u64, "trailing bytes after cache payload"));
    }
    Ok(MeasurementDataset {
        features: Array2::from_shape_vec((rows, cols), feats)
            .map_err(|e| Error::Dimension(e.to_string()))?,
        labels,
        targets,
        mask,
    })
}

pub fn save_cache(path: &Path, ds: &MeasurementDataset) -> Result<()> {
    std::fs::write(path, encode_cache(ds)).map_err(|e| Error::io(path, e))
}

pub fn load_cache(path: &Path) -> Result<MeasurementDataset> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_cache(path, &bytes)
}
