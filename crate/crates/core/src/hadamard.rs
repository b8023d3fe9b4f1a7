//! Hadamard-basis single-pixel measurement.
//!
//! Patterns are rows of the Sylvester Hadamard matrix in natural (Kronecker)
//! order: `H_2n = H_2 ⊗ H_n`, so entry `(i, j)` is `(-1)^popcount(i & j)`.
//! A measurement is the dot product of a ±1 pattern with the flattened
//! object; all `n_total` of them at once are one fast Walsh–Hadamard
//! transform.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use rayon::prelude::*;

/// Size of a square Hadamard sensing problem.
///
/// `n_total` is always a power of two. When it is an even power the order
/// also describes a `side × side` image; odd powers (e.g. `n_total = 2`)
/// are valid for pattern rows but carry no image shape.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct HadamardOrder {
    n_total: usize,
}

impl HadamardOrder {
    /// Order for `side × side` images; `side` must be `2^k` with `k ≥ 1`.
    pub fn from_side(side: usize) -> Result<Self> {
        if side < 2 || !side.is_power_of_two() {
            return Err(Error::Dimension(format!(
                "image side {side} is not a power of two >= 2"
            )));
        }
        Ok(Self {
            n_total: side * side,
        })
    }

    /// Order for a length-`n_total` transform.
    pub fn from_len(n_total: usize) -> Result<Self> {
        if n_total < 2 || !n_total.is_power_of_two() {
            return Err(Error::Dimension(format!(
                "transform length {n_total} is not a power of two >= 2"
            )));
        }
        Ok(Self { n_total })
    }

    pub fn n_total(self) -> usize {
        self.n_total
    }

    /// Image side, when `n_total` is a perfect square.
    pub fn side(self) -> Option<usize> {
        let bits = self.n_total.trailing_zeros();
        bits.is_multiple_of(2).then(|| 1usize << (bits / 2))
    }

    fn check_index(self, i: usize) -> Result<()> {
        if i >= self.n_total {
            return Err(Error::Bounds {
                index: i,
                len: self.n_total,
            });
        }
        Ok(())
    }
}

/// A square grayscale object with pixels in `[0, 1]`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageObject {
    side: usize,
    pixels: Vec<f64>,
}

impl ImageObject {
    pub fn new(side: usize, pixels: Vec<f64>) -> Result<Self> {
        if pixels.len() != side * side {
            return Err(Error::Dimension(format!(
                "expected {} pixels for side {side}, got {}",
                side * side,
                pixels.len()
            )));
        }
        if let Some(p) = pixels
            .iter()
            .position(|v| !v.is_finite() || !(0.0..=1.0).contains(v))
        {
            return Err(Error::Argument(format!(
                "pixel {p} = {} outside [0, 1]",
                pixels[p]
            )));
        }
        Ok(Self { side, pixels })
    }

    pub fn zeros(side: usize) -> Self {
        Self {
            side,
            pixels: vec![0.0; side * side],
        }
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn into_pixels(self) -> Vec<f64> {
        self.pixels
    }
}

/// Hadamard coefficients of an object, either all of them or a subset.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementVector {
    order: HadamardOrder,
    values: Vec<f64>,
    indices: Vec<usize>,
}

impl MeasurementVector {
    /// Full measurement vector (`indices = 0..n_total`).
    pub fn full(order: HadamardOrder, values: Vec<f64>) -> Result<Self> {
        if values.len() != order.n_total() {
            return Err(Error::Dimension(format!(
                "full measurement needs {} values, got {}",
                order.n_total(),
                values.len()
            )));
        }
        Ok(Self {
            order,
            values,
            indices: (0..order.n_total()).collect(),
        })
    }

    pub fn partial(order: HadamardOrder, indices: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        if indices.len() != values.len() {
            return Err(Error::Dimension(format!(
                "{} indices but {} values",
                indices.len(),
                values.len()
            )));
        }
        check_increasing(order, &indices)?;
        Ok(Self {
            order,
            values,
            indices,
        })
    }

    pub fn order(&self) -> HadamardOrder {
        self.order
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn is_full(&self) -> bool {
        self.values.len() == self.order.n_total()
    }
}

fn check_increasing(order: HadamardOrder, indices: &[usize]) -> Result<()> {
    for (k, &i) in indices.iter().enumerate() {
        order.check_index(i)?;
        if k > 0 && indices[k - 1] >= i {
            return Err(Error::Argument(format!(
                "indices must be strictly increasing (position {k})"
            )));
        }
    }
    Ok(())
}

/// Indices of the kept coefficients together with their training-set variance.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectionMask {
    order: HadamardOrder,
    indices: Vec<usize>,
    variances: Vec<f64>,
}

const MASK_HEADER: &str = "# spixel-mask v1";

impl SelectionMask {
    pub fn new(order: HadamardOrder, indices: Vec<usize>, variances: Vec<f64>) -> Result<Self> {
        if indices.len() != variances.len() {
            return Err(Error::Dimension(format!(
                "{} indices but {} variances",
                indices.len(),
                variances.len()
            )));
        }
        if indices.is_empty() {
            return Err(Error::Argument("mask must keep at least one index".into()));
        }
        check_increasing(order, &indices)?;
        if let Some(v) = variances.iter().find(|v| !(**v >= 0.0) || !v.is_finite()) {
            return Err(Error::Argument(format!("invalid variance {v}")));
        }
        Ok(Self {
            order,
            indices,
            variances,
        })
    }

    /// Mask that keeps every coefficient (variances recorded as zero).
    pub fn full(order: HadamardOrder) -> Self {
        Self {
            order,
            indices: (0..order.n_total()).collect(),
            variances: vec![0.0; order.n_total()],
        }
    }

    pub fn order(&self) -> HadamardOrder {
        self.order
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn variances(&self) -> &[f64] {
        &self.variances
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// Text form: a header line, then `index,variance` per kept coefficient.
    pub fn to_text(&self) -> String {
        let mut out = format!(
            "{MASK_HEADER} n_total={} m={}\n",
            self.order.n_total(),
            self.len()
        );
        for (i, v) in self.indices.iter().zip(&self.variances) {
            let _ = writeln!(out, "{i},{v:?}");
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let bad = |msg: String| Error::Argument(format!("mask file: {msg}"));
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| bad("empty".into()))?;
        let rest = header
            .strip_prefix(MASK_HEADER)
            .ok_or_else(|| bad(format!("bad header {header:?}")))?;
        let mut n_total = None;
        let mut m = None;
        for field in rest.split_whitespace() {
            match field.split_once('=') {
                Some(("n_total", v)) => n_total = v.parse::<usize>().ok(),
                Some(("m", v)) => m = v.parse::<usize>().ok(),
                _ => return Err(bad(format!("unknown header field {field:?}"))),
            }
        }
        let (n_total, m) = n_total
            .zip(m)
            .ok_or_else(|| bad("header needs n_total and m".into()))?;
        let order = HadamardOrder::from_len(n_total)?;
        let mut indices = Vec::with_capacity(m);
        let mut variances = Vec::with_capacity(m);
        for (lineno, line) in lines.enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let (i, v) = line
                .split_once(',')
                .ok_or_else(|| bad(format!("line {}: expected index,variance", lineno + 2)))?;
            indices.push(
                i.parse()
                    .map_err(|_| bad(format!("line {}: bad index {i:?}", lineno + 2)))?,
            );
            variances.push(
                v.parse()
                    .map_err(|_| bad(format!("line {}: bad variance {v:?}", lineno + 2)))?,
            );
        }
        if indices.len() != m {
            return Err(bad(format!("header says m={m}, found {} rows", indices.len())));
        }
        Self::new(order, indices, variances)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text).map_err(|e| Error::format(path, 0, e.to_string()))
    }
}

/// Row `i` of the natural-order Hadamard matrix of size `order.n_total()`.
pub fn hadamard_row(order: HadamardOrder, i: usize) -> Result<Vec<f64>> {
    order.check_index(i)?;
    Ok((0..order.n_total())
        .map(|j| if (i & j).count_ones().is_multiple_of(2) { 1.0 } else { -1.0 })
        .collect())
}

/// In-place unnormalized fast Walsh–Hadamard transform (natural order).
///
/// Panics if the length is not a power of two.
pub fn fwht_in_place(data: &mut [f64]) {
    let n = data.len();
    assert!(n.is_power_of_two(), "fwht length {n} is not a power of two");
    let mut h = 1;
    while h < n {
        for block in data.chunks_exact_mut(2 * h) {
            let (lo, hi) = block.split_at_mut(h);
            for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
                let (x, y) = (*a, *b);
                *a = x + y;
                *b = x - y;
            }
        }
        h *= 2;
    }
}

/// All `n_total` single-pixel measurements of an object.
pub fn measure_full(object: &ImageObject) -> Result<MeasurementVector> {
    let order = HadamardOrder::from_side(object.side())?;
    let mut values = object.pixels().to_vec();
    fwht_in_place(&mut values);
    MeasurementVector::full(order, values)
}

/// Linear inverse `(1/n_total) Σ_i M_i H^(i)`; missing coefficients count as zero.
///
/// The result is not clamped, so subsampled inputs may leave `[0, 1]`.
pub fn reconstruct_linear(measurements: &MeasurementVector) -> Vec<f64> {
    let n = measurements.order().n_total();
    let mut coeffs = vec![0.0; n];
    for (&i, &v) in measurements.indices().iter().zip(measurements.values()) {
        coeffs[i] = v;
    }
    fwht_in_place(&mut coeffs);
    let scale = 1.0 / n as f64;
    coeffs.iter_mut().for_each(|c| *c *= scale);
    coeffs
}

/// Population variance of every column, two-pass.
///
/// Each column is summed in sorted order, so the result depends only on the
/// multiset of rows and never on their order.
pub fn column_variances<'a, I>(rows: I, width: usize) -> Result<Vec<f64>>
where
    I: IntoIterator<Item = &'a [f64]>,
{
    let rows: Vec<&[f64]> = rows.into_iter().collect();
    if let Some(bad) = rows.iter().find(|r| r.len() != width) {
        return Err(Error::Dimension(format!(
            "row of length {} in a width-{width} dataset",
            bad.len()
        )));
    }
    if rows.is_empty() {
        return Err(Error::Argument("empty dataset".into()));
    }
    let n = rows.len() as f64;
    Ok((0..width)
        .into_par_iter()
        .map(|j| {
            let mut col: Vec<f64> = rows.iter().map(|r| r[j]).collect();
            col.sort_unstable_by(f64::total_cmp);
            let mean = col.iter().sum::<f64>() / n;
            col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n
        })
        .collect())
}

/// Keep the `m` coefficients with the largest variance across the dataset.
///
/// Ties go to the smaller index; the result is stored in increasing index order.
pub fn select_top_variance(dataset: &[MeasurementVector], m: usize) -> Result<SelectionMask> {
    let first = dataset
        .first()
        .ok_or_else(|| Error::Argument("empty dataset".into()))?;
    let order = first.order();
    for (k, v) in dataset.iter().enumerate() {
        if v.order() != order || !v.is_full() {
            return Err(Error::Dimension(format!(
                "measurement {k} is not a full vector of length {}",
                order.n_total()
            )));
        }
    }
    let variances = column_variances(dataset.iter().map(|v| v.values()), order.n_total())?;
    mask_from_variances(order, &variances, m)
}

/// Top-`m` selection over precomputed per-index variances.
pub fn mask_from_variances(order: HadamardOrder, variances: &[f64], m: usize) -> Result<SelectionMask> {
    let n = order.n_total();
    if variances.len() != n {
        return Err(Error::Dimension(format!(
            "{} variances for transform length {n}",
            variances.len()
        )));
    }
    if m == 0 || m > n {
        return Err(Error::Argument(format!("m = {m} must be in 1..={n}")));
    }
    let mut ranked: Vec<usize> = (0..n).collect();
    ranked.sort_by(|&a, &b| variances[b].total_cmp(&variances[a]).then(a.cmp(&b)));
    let mut kept = ranked[..m].to_vec();
    kept.sort_unstable();
    let kept_var = kept.iter().map(|&i| variances[i]).collect();
    SelectionMask::new(order, kept, kept_var)
}

/// Gather the masked coefficients out of a full measurement vector.
pub fn apply_mask(full: &MeasurementVector, mask: &SelectionMask) -> Result<MeasurementVector> {
    if full.order() != mask.order() || !full.is_full() {
        return Err(Error::Dimension(format!(
            "mask for length {} applied to a {}-of-{} measurement",
            mask.order().n_total(),
            full.values().len(),
            full.order().n_total()
        )));
    }
    let values = mask.indices().iter().map(|&i| full.values()[i]).collect();
    Ok(MeasurementVector {
        order: full.order(),
        values,
        indices: mask.indices().to_vec(),
    })
}

/// Pattern `i` reshaped row-major to `side × side`.
pub fn export_pattern_image(order: HadamardOrder, i: usize) -> Result<Vec<Vec<i8>>> {
    let side = order.side().ok_or_else(|| {
        Error::Dimension(format!(
            "length {} is not a square image size",
            order.n_total()
        ))
    })?;
    let row = hadamard_row(order, i)?;
    Ok(row
        .chunks(side)
        .map(|r| r.iter().map(|&v| v as i8).collect())
        .collect())
}

/// Binary PGM bytes for a ±1 pattern (−1 → 0, +1 → 255).
pub fn pattern_to_pgm(pattern: &[Vec<i8>]) -> Vec<u8> {
    let height = pattern.len();
    let width = pattern.first().map_or(0, Vec::len);
    let pixels: Vec<u8> = pattern
        .iter()
        .flatten()
        .map(|&v| if v > 0 { 255 } else { 0 })
        .collect();
    crate::pgm::encode(width, height, &pixels)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kron_oracle(n: usize) -> Vec<Vec<f64>> {
        let mut h = vec![vec![1.0]];
        while h.len() < n {
            let m = h.len();
            let mut next = vec![vec![0.0; 2 * m]; 2 * m];
            for i in 0..m {
                for j in 0..m {
                    next[i][j] = h[i][j];
                    next[i][j + m] = h[i][j];
                    next[i + m][j] = h[i][j];
                    next[i + m][j + m] = -h[i][j];
                }
            }
            h = next;
        }
        h
    }

    #[test]
    fn rows_match_examples() {
        let o4 = HadamardOrder::from_len(4).unwrap();
        assert_eq!(hadamard_row(o4, 0).unwrap(), vec![1.0; 4]);
        assert_eq!(hadamard_row(o4, 3).unwrap(), vec![1.0, -1.0, -1.0, 1.0]);
        let o2 = HadamardOrder::from_len(2).unwrap();
        assert_eq!(hadamard_row(o2, 1).unwrap(), vec![1.0, -1.0]);
        assert!(matches!(
            hadamard_row(o4, 4),
            Err(Error::Bounds { index: 4, len: 4 })
        ));
    }

    #[test]
    fn rows_match_kronecker_recursion() {
        for n in [2, 4, 8, 16, 64] {
            let h = kron_oracle(n);
            let order = HadamardOrder::from_len(n).unwrap();
            for (i, expected) in h.iter().enumerate() {
                assert_eq!(&hadamard_row(order, i).unwrap(), expected);
            }
        }
    }

    #[test]
    fn rows_are_orthogonal() {
        for n in [4, 16, 64, 256] {
            let order = HadamardOrder::from_len(n).unwrap();
            let rows: Vec<_> = (0..n).map(|i| hadamard_row(order, i).unwrap()).collect();
            for i in 0..n {
                for j in 0..n {
                    let d: f64 = rows[i].iter().zip(&rows[j]).map(|(a, b)| a * b).sum();
                    assert_eq!(d, if i == j { n as f64 } else { 0.0 });
                }
            }
        }
    }

    #[test]
    fn order_validation() {
        assert!(HadamardOrder::from_side(3).is_err());
        assert!(HadamardOrder::from_side(1).is_err());
        assert!(HadamardOrder::from_len(6).is_err());
        let o = HadamardOrder::from_side(32).unwrap();
        assert_eq!(o.n_total(), 1024);
        assert_eq!(o.side(), Some(32));
        assert_eq!(HadamardOrder::from_len(2).unwrap().side(), None);
    }

    #[test]
    fn measure_examples() {
        let c = 0.37;
        let obj = ImageObject::new(4, vec![c; 16]).unwrap();
        let m = measure_full(&obj).unwrap();
        assert!((m.values()[0] - 16.0 * c).abs() < 1e-12);
        assert!(m.values()[1..].iter().all(|v| v.abs() < 1e-12));

        let zero = measure_full(&ImageObject::zeros(8)).unwrap();
        assert!(zero.values().iter().all(|&v| v == 0.0));

        let delta = ImageObject::new(2, vec![1.0, 0.0, 0.0, 0.0]).unwrap();
        assert_eq!(measure_full(&delta).unwrap().values(), &[1.0, 1.0, 1.0, 1.0]);
    }

    #[test]
    fn image_validation() {
        assert!(ImageObject::new(2, vec![0.0; 3]).is_err());
        assert!(ImageObject::new(2, vec![0.0, 1.5, 0.0, 0.0]).is_err());
        assert!(ImageObject::new(2, vec![0.0, f64::NAN, 0.0, 0.0]).is_err());
        let odd = ImageObject::new(3, vec![0.0; 9]).unwrap();
        assert!(matches!(measure_full(&odd), Err(Error::Dimension(_))));
    }

    #[test]
    fn reconstruct_single_dc_coefficient() {
        let order = HadamardOrder::from_side(4).unwrap();
        let c = 0.25;
        let m = MeasurementVector::partial(order, vec![0], vec![16.0 * c]).unwrap();
        assert!(reconstruct_linear(&m).iter().all(|&v| (v - c).abs() < 1e-15));
    }

    #[test]
    fn round_trip_sixteen_pixels() {
        let pixels = vec![
            0.1, 0.9, 0.0, 0.5, 0.3, 0.3, 1.0, 0.2, 0.75, 0.05, 0.6, 0.4, 0.0, 0.0, 0.8, 0.33,
        ];
        let obj = ImageObject::new(4, pixels.clone()).unwrap();
        let back = reconstruct_linear(&measure_full(&obj).unwrap());
        for (a, b) in back.iter().zip(&pixels) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn variance_selection_examples() {
        let order = HadamardOrder::from_len(16).unwrap();
        let a = MeasurementVector::full(order, vec![1.0; 16]).unwrap();
        let mut bv = vec![1.0; 16];
        bv[7] = 3.0;
        let b = MeasurementVector::full(order, bv).unwrap();
        let mask = select_top_variance(&[a.clone(), b], 1).unwrap();
        assert_eq!(mask.indices(), &[7]);
        assert_eq!(mask.variances(), &[1.0]);

        let same = select_top_variance(&[a.clone(), a.clone(), a.clone()], 3).unwrap();
        assert_eq!(same.indices(), &[0, 1, 2]);

        assert!(matches!(select_top_variance(&[], 1), Err(Error::Argument(_))));
        assert!(matches!(
            select_top_variance(std::slice::from_ref(&a), 17),
            Err(Error::Argument(_))
        ));
        assert!(select_top_variance(&[a], 0).is_err());
    }

    #[test]
    fn mask_gather() {
        let order = HadamardOrder::from_len(16).unwrap();
        let values: Vec<f64> = (0..16).map(|i| (i * i) as f64 - 3.5).collect();
        let full = MeasurementVector::full(order, values.clone()).unwrap();
        let mask = SelectionMask::new(order, vec![2, 5, 11], vec![0.0; 3]).unwrap();
        let sub = apply_mask(&full, &mask).unwrap();
        assert_eq!(sub.values(), &[values[2], values[5], values[11]]);
        assert_eq!(sub.indices(), &[2, 5, 11]);
        assert_eq!(apply_mask(&full, &SelectionMask::full(order)).unwrap(), full);

        let c = 0.5;
        let obj = ImageObject::new(4, vec![c; 16]).unwrap();
        let dc = SelectionMask::new(order, vec![0], vec![0.0]).unwrap();
        assert_eq!(apply_mask(&measure_full(&obj).unwrap(), &dc).unwrap().values(), &[8.0]);

        let other = SelectionMask::full(HadamardOrder::from_len(4).unwrap());
        assert!(matches!(apply_mask(&full, &other), Err(Error::Dimension(_))));
    }

    #[test]
    fn pattern_export() {
        let o = HadamardOrder::from_len(4).unwrap();
        assert_eq!(export_pattern_image(o, 1).unwrap(), vec![vec![1, -1], vec![1, -1]]);
        assert!(export_pattern_image(o, 4).is_err());
        let o32 = HadamardOrder::from_side(32).unwrap();
        let white = export_pattern_image(o32, 0).unwrap();
        assert!(white.iter().flatten().all(|&v| v == 1));
        let pgm = pattern_to_pgm(&export_pattern_image(o, 1).unwrap());
        assert_eq!(&pgm[..], b"P5\n2 2\n255\n\xff\x00\xff\x00");
    }

    #[test]
    fn mask_text_round_trip() {
        let order = HadamardOrder::from_side(32).unwrap();
        let mask = SelectionMask::new(order, vec![0, 3, 900], vec![12.5, 0.1 + 0.2, 0.0]).unwrap();
        let text = mask.to_text();
        assert!(text.starts_with("# spixel-mask v1 n_total=1024 m=3\n0,12.5\n"));
        assert_eq!(SelectionMask::from_text(&text).unwrap(), mask);
        assert!(SelectionMask::from_text("# spixel-mask v1 n_total=1024 m=2\n1,0.5\n").is_err());
        assert!(SelectionMask::from_text("garbage").is_err());
        assert!(SelectionMask::from_text("# spixel-mask v1 n_total=16 m=2\n3,1\n2,1\n").is_err());
    }
}
