//! Pencils `M(a, Y) = sum_k a_k Y_k`, their minors, cofactor kernel vectors
//! and the local geometry of the rank-drop locus.
//!
//! Row and column indices passed to [`minor`], [`pluecker_residual`] and
//! [`kernel_vector_psi`] are 1-based.

mod search;

pub use search::{afcr_margin, explore, rank_drop_search, AfcrMargin, Exploration, RankDropPoint, SearchBudget};

use itertools::Itertools;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{determinant, singular_values};
use crate::tensor::Tensor3;

/// Shape data for an `n x p x m` tensor in the range where the certifier
/// applies, normalized so that `3 <= m <= n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProblemDims {
    pub m: usize,
    pub n: usize,
    pub p: usize,
}

impl ProblemDims {
    pub fn new(m: usize, n: usize, p: usize) -> Result<Self> {
        if m < 3 || m > n {
            return Err(Error::Domain(format!("need 3 <= m <= n, got m = {m}, n = {n}")));
        }
        let lo = (m - 1) * (n - 1) + 1;
        let hi = (m - 1) * n;
        if p < lo || p > hi {
            return Err(Error::Domain(format!("need {lo} <= p <= {hi} for m = {m}, n = {n}, got p = {p}")));
        }
        Ok(Self { m, n, p })
    }

    /// Dimensions of an `n x p x m` tensor.
    pub fn of_tensor(t: &Tensor3) -> Result<Self> {
        let (n, p, m) = t.dims();
        Self::new(m, n, p)
    }

    pub fn u(&self) -> usize {
        self.m * self.n - self.p
    }

    pub fn l(&self) -> usize {
        (self.m - 1) * self.n - self.p
    }

    pub fn v(&self) -> usize {
        self.l() + 1
    }

    pub fn t(&self) -> usize {
        self.n
    }
}

/// `sum_k a_k Y_k`.
pub fn contract_pencil(a: &DVector<f64>, y: &Tensor3) -> Result<DMatrix<f64>> {
    let (d1, d2, d3) = y.dims();
    if a.len() != d3 {
        return Err(Error::Dimension(format!("coefficient vector has length {}, tensor has {d3} slices", a.len())));
    }
    let data = y.data();
    let mut out = DMatrix::zeros(d1, d2);
    for (k, &ak) in a.iter().enumerate() {
        if ak == 0.0 {
            continue;
        }
        let block = &data[k * d1 * d2..(k + 1) * d1 * d2];
        for i in 0..d1 {
            for j in 0..d2 {
                out[(i, j)] += ak * block[i * d2 + j];
            }
        }
    }
    Ok(out)
}

fn check_indices(list: &[usize], bound: usize, what: &str) -> Result<()> {
    if let Some(&bad) = list.iter().find(|&&i| i == 0 || i > bound) {
        return Err(Error::Domain(format!("{what} index {bad} outside 1..={bound}")));
    }
    Ok(())
}

/// Determinant of the submatrix on the given rows and columns.
pub fn minor(m: &DMatrix<f64>, rows: &[usize], cols: &[usize]) -> Result<f64> {
    if rows.len() != cols.len() {
        return Err(Error::Dimension(format!("{} rows but {} columns selected", rows.len(), cols.len())));
    }
    check_indices(rows, m.nrows(), "row")?;
    check_indices(cols, m.ncols(), "column")?;
    let sub = DMatrix::from_fn(rows.len(), cols.len(), |i, j| m[(rows[i] - 1, cols[j] - 1)]);
    Ok(determinant(&sub))
}

/// Maximal minor `[rows]_M` using every column.
pub fn maximal_minor(m: &DMatrix<f64>, rows: &[usize]) -> Result<f64> {
    let cols: Vec<usize> = (1..=m.ncols()).collect();
    minor(m, rows, &cols)
}

/// Absolute value of the alternating sum in the Plücker relation
/// `sum sgn(I, J) [a, c_I]_M [c_J, b]_M` over splits of `c` into an ordered
/// `t`-subset `I` and its complement `J`, where `t = n - |a|`.
///
/// `b` holds `b_l, ..., b_n`, so `l = n + 1 - |b|`. The relation needs
/// `|c| = n - k + l - 1 > n` and `t > 0` with `k = |a|`.
pub fn pluecker_residual(m: &DMatrix<f64>, a: &[usize], b: &[usize], c: &[usize]) -> Result<f64> {
    let (u, n) = m.shape();
    if u < n {
        return Err(Error::Dimension(format!("need u >= n, got {u} x {n}")));
    }
    let k = a.len();
    if k >= n {
        return Err(Error::Domain(format!("need t = n - k > 0, got k = {k}, n = {n}")));
    }
    if b.is_empty() || b.len() > n {
        return Err(Error::Domain(format!("b must list b_l..b_n with 1 <= l <= n, got {} entries", b.len())));
    }
    let l = n + 1 - b.len();
    let s = c.len();
    if s + k + 1 != n + l || s <= n {
        return Err(Error::Domain(format!(
            "need s = n - k + l - 1 > n; got s = {s}, n = {n}, k = {k}, l = {l}"
        )));
    }
    for (list, name) in [(a, "a"), (b, "b"), (c, "c")] {
        check_indices(list, u, name)?;
    }
    let t = n - k;
    let mut sum = 0.0;
    for subset in (0..s).combinations(t) {
        let inversions: usize = subset.iter().enumerate().map(|(r, &i)| i - r).sum();
        let sign = if inversions.is_multiple_of(2) { 1.0 } else { -1.0 };
        let mut left: Vec<usize> = a.to_vec();
        left.extend(subset.iter().map(|&i| c[i]));
        let mut right: Vec<usize> = (0..s).filter(|i| !subset.contains(i)).map(|i| c[i]).collect();
        right.extend_from_slice(b);
        sum += sign * maximal_minor(m, &left)? * maximal_minor(m, &right)?;
    }
    Ok(sum.abs())
}

/// Signed cofactor vector with entries `(-1)^(n+j) [rows | 1..n without j]`.
///
/// With this convention entry `k` of `M(a, Y) psi` is the maximal minor
/// `[rows, k]` (row `k` placed last), so `psi` lies in the kernel whenever
/// all maximal minors vanish.
pub fn kernel_vector_psi(a: &DVector<f64>, y: &Tensor3, rows: &[usize]) -> Result<DVector<f64>> {
    let m = contract_pencil(a, y)?;
    psi_of_matrix(&m, rows)
}

pub(crate) fn psi_of_matrix(m: &DMatrix<f64>, rows: &[usize]) -> Result<DVector<f64>> {
    let n = m.ncols();
    if rows.len() + 1 != n {
        return Err(Error::Dimension(format!("psi needs {} row indices, got {}", n - 1, rows.len())));
    }
    check_indices(rows, m.nrows(), "row")?;
    if rows.iter().duplicates().next().is_some() {
        return Err(Error::Domain(format!("repeated row index in {rows:?}")));
    }
    let mut out = DVector::zeros(n);
    for j in 1..=n {
        let cols: Vec<usize> = (1..=n).filter(|&c| c != j).collect();
        let sign = if (n + j).is_multiple_of(2) { 1.0 } else { -1.0 };
        out[j - 1] = sign * minor(m, rows, &cols)?;
    }
    Ok(out)
}

/// Local data at a candidate rank-drop point, with `t = n`.
#[derive(Debug, Clone)]
pub struct PointRegularity {
    /// `|det|` of the leading `(n-1) x (n-1)` block of `M(a, Y)`.
    pub corner: f64,
    /// Partial derivatives of `mu_{k,n}` (`k = n..u`) in the last `v` coordinates.
    pub jacobian: DMatrix<f64>,
    pub jacobian_ok: bool,
}

/// `mu_{k,n}(a) = [1..n-1, k | 1..n]_{M(a, Y)}` for `k = n..u`.
pub fn corner_minors(a: &DVector<f64>, y: &Tensor3) -> Result<DVector<f64>> {
    let m = contract_pencil(a, y)?;
    let (u, n) = m.shape();
    let vals = (n..=u)
        .map(|k| {
            let mut rows: Vec<usize> = (1..n).collect();
            rows.push(k);
            maximal_minor(&m, &rows)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DVector::from_vec(vals))
}

pub fn point_regularity(a: &DVector<f64>, y: &Tensor3, dims: &ProblemDims) -> Result<PointRegularity> {
    check_pencil_shape(y, dims)?;
    let (u, n, m) = y.dims();
    let v = dims.v();
    let pencil = contract_pencil(a, y)?;
    let corner = determinant(&pencil.view((0, 0), (n - 1, n - 1)).into_owned()).abs();

    let slices = y.slices();
    let mut jac = DMatrix::zeros(u - n + 1, v);
    for (r, k) in (n..=u).enumerate() {
        let pick = |mat: &DMatrix<f64>| {
            DMatrix::from_fn(n, n, |i, j| if i + 1 < n { mat[(i, j)] } else { mat[(k - 1, j)] })
        };
        let adj = adjugate(&pick(&pencil));
        for (c, idx) in (m - v..m).enumerate() {
            // d det(B) = tr(adj(B) dB)
            jac[(r, c)] = (&adj * pick(&slices[idx])).trace();
        }
    }
    let s = singular_values(&jac);
    let jacobian_ok = match (s.first(), s.last()) {
        (Some(&hi), Some(&lo)) => hi > 0.0 && lo > 1e-8 * hi,
        _ => false,
    };
    Ok(PointRegularity {
        corner,
        jacobian: jac,
        jacobian_ok,
    })
}

fn adjugate(b: &DMatrix<f64>) -> DMatrix<f64> {
    let n = b.nrows();
    if n == 1 {
        return DMatrix::from_element(1, 1, 1.0);
    }
    DMatrix::from_fn(n, n, |j, i| {
        let sub = b.clone().remove_row(i).remove_column(j);
        let sign = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
        sign * determinant(&sub)
    })
}

pub(crate) fn check_pencil_shape(y: &Tensor3, dims: &ProblemDims) -> Result<()> {
    let want = (dims.u(), dims.n, dims.m);
    if y.dims() != want {
        return Err(Error::Dimension(format!("pencil tensor is {:?}, expected u x n x m = {want:?}", y.dims())));
    }
    Ok(())
}
