//! Dense real 3-way arrays.
//!
//! A `d1 x d2 x d3` tensor is stored slice-major: slice `k` is the `d1 x d2`
//! matrix `T_k`, stored row-major, so entry `(i, j, k)` lives at
//! `k * d1 * d2 + i * d2 + j`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor3 {
    d1: usize,
    d2: usize,
    d3: usize,
    data: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct TensorJson {
    dims: Vec<usize>,
    #[serde(default = "slice_major")]
    layout: String,
    data: Vec<f64>,
}

fn slice_major() -> String {
    "slice-major".to_string()
}

impl Tensor3 {
    pub fn new(d1: usize, d2: usize, d3: usize, data: Vec<f64>) -> Result<Self> {
        if d1 == 0 || d2 == 0 || d3 == 0 {
            return Err(Error::Dimension(format!("tensor dims must be positive, got {d1}x{d2}x{d3}")));
        }
        if data.len() != d1 * d2 * d3 {
            return Err(Error::Dimension(format!(
                "tensor {d1}x{d2}x{d3} needs {} entries, got {}",
                d1 * d2 * d3,
                data.len()
            )));
        }
        Ok(Self { d1, d2, d3, data })
    }

    pub fn zeros(d1: usize, d2: usize, d3: usize) -> Self {
        Self::new(d1, d2, d3, vec![0.0; d1 * d2 * d3]).expect("positive dims")
    }

    /// Builds `(T_1; ...; T_d3)` from equally shaped slices.
    pub fn from_slices(slices: &[DMatrix<f64>]) -> Result<Self> {
        let first = slices
            .first()
            .ok_or_else(|| Error::Dimension("need at least one slice".into()))?;
        let (d1, d2) = first.shape();
        let mut data = Vec::with_capacity(d1 * d2 * slices.len());
        for s in slices {
            if s.shape() != (d1, d2) {
                return Err(Error::Dimension(format!("slice shape {:?} != {:?}", s.shape(), (d1, d2))));
            }
            for i in 0..d1 {
                for j in 0..d2 {
                    data.push(s[(i, j)]);
                }
            }
        }
        Self::new(d1, d2, slices.len(), data)
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.d1, self.d2, self.d3)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    fn offset(&self, i: usize, j: usize, k: usize) -> usize {
        k * self.d1 * self.d2 + i * self.d2 + j
    }

    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.data[self.offset(i, j, k)]
    }

    pub fn set(&mut self, i: usize, j: usize, k: usize, value: f64) {
        let o = self.offset(i, j, k);
        self.data[o] = value;
    }

    /// Slice `T_k` (0-based `k`).
    pub fn slice(&self, k: usize) -> DMatrix<f64> {
        let start = k * self.d1 * self.d2;
        DMatrix::from_row_slice(self.d1, self.d2, &self.data[start..start + self.d1 * self.d2])
    }

    pub fn slices(&self) -> Vec<DMatrix<f64>> {
        (0..self.d3).map(|k| self.slice(k)).collect()
    }

    /// Mode 1: `(T_1, ..., T_d3)` side by side. Mode 2: the slices stacked vertically.
    pub fn flatten(&self, mode: u8) -> Result<DMatrix<f64>> {
        let (d1, d2, d3) = self.dims();
        match mode {
            1 => Ok(DMatrix::from_fn(d1, d2 * d3, |i, c| self.get(i, c % d2, c / d2))),
            2 => Ok(DMatrix::from_fn(d1 * d3, d2, |r, j| self.get(r % d1, j, r / d1))),
            _ => Err(Error::Domain(format!("flatten mode must be 1 or 2, got {mode}"))),
        }
    }

    /// Inverse of mode-1 flattening: splits a `d1 x (d2 d3)` matrix into `d3` slices.
    pub fn from_flat1(m: &DMatrix<f64>, d2: usize) -> Result<Self> {
        let (d1, cols) = m.shape();
        if d2 == 0 || cols % d2 != 0 {
            return Err(Error::Dimension(format!("{cols} columns do not split into blocks of {d2}")));
        }
        let d3 = cols / d2;
        let slices: Vec<_> = (0..d3).map(|k| m.columns(k * d2, d2).into_owned()).collect();
        let t = Self::from_slices(&slices)?;
        debug_assert_eq!(t.dims(), (d1, d2, d3));
        Ok(t)
    }

    /// Inverse of mode-2 flattening: splits a `(d1 d3) x d2` matrix into `d3` slices.
    pub fn from_flat2(m: &DMatrix<f64>, d1: usize) -> Result<Self> {
        let (rows, _) = m.shape();
        if d1 == 0 || rows % d1 != 0 {
            return Err(Error::Dimension(format!("{rows} rows do not split into blocks of {d1}")));
        }
        let slices: Vec<_> = (0..rows / d1).map(|k| m.rows(k * d1, d1).into_owned()).collect();
        Self::from_slices(&slices)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            data: self.data.iter().map(|x| c * x).collect(),
            ..self.clone()
        }
    }

    /// `P T = (P T_1; ...; P T_d3)`.
    pub fn left_mul(&self, p: &DMatrix<f64>) -> Result<Self> {
        if p.ncols() != self.d1 {
            return Err(Error::Dimension(format!("P has {} columns, tensor has d1 = {}", p.ncols(), self.d1)));
        }
        let slices: Vec<_> = self.slices().iter().map(|s| p * s).collect();
        Self::from_slices(&slices)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        if self.dims() != other.dims() {
            return Err(Error::Dimension(format!("{:?} vs {:?}", self.dims(), other.dims())));
        }
        Ok(Self {
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
            ..self.clone()
        })
    }

    pub fn to_json(&self) -> String {
        let doc = TensorJson {
            dims: vec![self.d1, self.d2, self.d3],
            layout: slice_major(),
            data: self.data.clone(),
        };
        serde_json::to_string(&doc).expect("tensor serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: TensorJson = serde_json::from_str(text).map_err(|e| Error::parse("tensor", e.to_string()))?;
        if doc.layout != "slice-major" {
            return Err(Error::parse("layout", format!("unsupported layout `{}`", doc.layout)));
        }
        let [d1, d2, d3] = doc.dims[..] else {
            return Err(Error::parse("dims", format!("expected 3 dims, got {}", doc.dims.len())));
        };
        Self::new(d1, d2, d3, doc.data).map_err(|e| Error::parse("data", e.to_string()))
    }

    /// Plain text: a header line `d1 d2 d3`, then `d3` blocks of `d1` rows.
    pub fn to_text(&self) -> String {
        let mut out = format!("{} {} {}\n", self.d1, self.d2, self.d3);
        for k in 0..self.d3 {
            for i in 0..self.d1 {
                let row: Vec<String> = (0..self.d2).map(|j| format!("{:e}", self.get(i, j, k))).collect();
                out.push_str(&row.join(" "));
                out.push('\n');
            }
            if k + 1 < self.d3 {
                out.push('\n');
            }
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#'));
        let header = lines.next().ok_or_else(|| Error::parse("dims", "empty input"))?;
        let dims: Vec<usize> = header
            .split_whitespace()
            .map(|t| t.parse::<usize>().map_err(|e| Error::parse("dims", e.to_string())))
            .collect::<Result<_>>()?;
        let [d1, d2, d3] = dims[..] else {
            return Err(Error::parse("dims", format!("expected 3 dims, got {}", dims.len())));
        };
        let mut data = Vec::with_capacity(d1 * d2 * d3);
        for (r, line) in lines.enumerate() {
            let row: Vec<f64> = line
                .split_whitespace()
                .map(|t| t.parse::<f64>().map_err(|e| Error::parse(format!("row {}", r + 1), e.to_string())))
                .collect::<Result<_>>()?;
            if row.len() != d2 {
                return Err(Error::parse(format!("row {}", r + 1), format!("expected {d2} entries, got {}", row.len())));
            }
            data.extend(row);
        }
        Self::new(d1, d2, d3, data).map_err(|e| Error::parse("data", e.to_string()))
    }

    /// JSON if the text starts with `{`, plain text otherwise.
    pub fn parse(text: &str) -> Result<Self> {
        if text.trim_start().starts_with('{') {
            Self::from_json(text)
        } else {
            Self::from_text(text)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_identities() -> Tensor3 {
        let e = DMatrix::<f64>::identity(2, 2);
        Tensor3::from_slices(&[e.clone(), e]).unwrap()
    }

    #[test]
    fn flatten_examples() {
        let t = two_identities();
        let f1 = t.flatten(1).unwrap();
        assert_eq!(f1.shape(), (2, 4));
        assert_eq!(f1, DMatrix::from_row_slice(2, 4, &[1., 0., 1., 0., 0., 1., 0., 1.]));
        let f2 = t.flatten(2).unwrap();
        assert_eq!(f2.shape(), (4, 2));
        assert_eq!(f2, DMatrix::from_row_slice(4, 2, &[1., 0., 0., 1., 1., 0., 0., 1.]));
        assert!(t.flatten(3).is_err());

        let single = DMatrix::from_row_slice(2, 3, &[1., 2., 3., 4., 5., 6.]);
        let t1 = Tensor3::from_slices(std::slice::from_ref(&single)).unwrap();
        assert_eq!(t1.flatten(1).unwrap(), single);
    }

    #[test]
    fn flatten_inverses() {
        let t = Tensor3::new(2, 3, 4, (0..24).map(f64::from).collect()).unwrap();
        assert_eq!(Tensor3::from_flat1(&t.flatten(1).unwrap(), 3).unwrap(), t);
        assert_eq!(Tensor3::from_flat2(&t.flatten(2).unwrap(), 2).unwrap(), t);
    }

    #[test]
    fn layout_is_slice_major() {
        let t = Tensor3::new(2, 2, 2, (0..8).map(f64::from).collect()).unwrap();
        assert_eq!(t.slice(1), DMatrix::from_row_slice(2, 2, &[4., 5., 6., 7.]));
        assert_eq!(t.get(1, 0, 1), 6.0);
    }

    #[test]
    fn rejects_bad_lengths() {
        assert!(Tensor3::new(2, 2, 2, vec![0.0; 7]).is_err());
        assert!(Tensor3::new(0, 2, 2, vec![]).is_err());
    }

    #[test]
    fn text_and_json_round_trip() {
        let t = Tensor3::new(2, 3, 2, vec![1.5, -2., 3., 0.25, 1e-9, 7., 8., 9., -1., 2., 3., 4.]).unwrap();
        assert_eq!(Tensor3::parse(&t.to_json()).unwrap(), t);
        assert_eq!(Tensor3::parse(&t.to_text()).unwrap(), t);
    }

    #[test]
    fn parse_errors_name_field() {
        let err = Tensor3::from_text("2 2 1\n1 2\n3\n").unwrap_err();
        assert!(err.to_string().contains("row 2"), "{err}");
        let err = Tensor3::from_json(r#"{"dims":[2,2],"data":[1,2,3,4]}"#).unwrap_err();
        assert!(err.to_string().contains("dims"), "{err}");
        let err = Tensor3::from_json(r#"{"dims":[1,1,1],"layout":"fortran","data":[1]}"#).unwrap_err();
        assert!(err.to_string().contains("layout"), "{err}");
    }
}
