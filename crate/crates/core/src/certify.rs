//! Rank-`p` certification for `n x p x m` tensors.
//!
//! A tensor `T` with invertible leading block `P` (the first `p` rows of
//! `fl_2(T)`) is reduced to `sigma(T)`, a `u x p` matrix, and then to the
//! pencil `W` whose mode-1 flattening is `(sigma(T), -E_u)`. Real points `d`
//! where `M(d, W)` loses rank, together with kernel vectors `a`, produce the
//! columns `phi(d, a)` of a `p x p` matrix `N`. When `p` such columns are
//! independent, `T_k = A D_k N^{-1} P` is an explicit rank-`p` decomposition.
//! When `W` is AFCR no such points exist and the rank exceeds `p`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{condition_number, inverse, numerical_rank};
use crate::pencil::{contract_pencil, explore, ProblemDims, RankDropPoint, SearchBudget};
use crate::tensor::Tensor3;

const NOT_IN_V_COND: f64 = 1e12;
const N_COND_LIMIT: f64 = 1e10;
const SPAN_TOL: f64 = 1e-8;
const EQUATION_TOL: f64 = 1e-6;
const RESIDUAL_TOL: f64 = 1e-6;

fn leading_block(t: &Tensor3, p: usize) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let f2 = t.flatten(2)?;
    let rows = f2.nrows();
    if rows < p {
        return Err(Error::Dimension(format!("fl_2 has {rows} rows, fewer than p = {p}")));
    }
    Ok((f2.rows(0, p).into_owned(), f2.rows(p, rows - p).into_owned()))
}

fn leading_inverse(lead: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let cond = condition_number(lead);
    if !(cond < NOT_IN_V_COND) {
        return Err(Error::NotInV { cond });
    }
    inverse(lead, "leading p x p block of fl_2(T)")
}

/// `(bottom u rows of fl_2(T)) * (top p rows)^{-1}`.
pub fn sigma(t: &Tensor3) -> Result<DMatrix<f64>> {
    let (_, p, _) = t.dims();
    let (top, bottom) = leading_block(t, p)?;
    Ok(bottom * leading_inverse(&top)?)
}

/// `A -> (A, -E_u)`.
pub fn iota(a: &DMatrix<f64>) -> DMatrix<f64> {
    let (u, p) = a.shape();
    let mut out = DMatrix::zeros(u, p + u);
    out.columns_mut(0, p).copy_from(a);
    out.columns_mut(p, u).fill_diagonal(-1.0);
    out
}

/// `iota(A)` read back as a `u x n x m` tensor through `fl_1`.
pub fn iota_tensor(a: &DMatrix<f64>, dims: &ProblemDims) -> Result<Tensor3> {
    if a.shape() != (dims.u(), dims.p) {
        return Err(Error::Dimension(format!("expected a {} x {} matrix, got {:?}", dims.u(), dims.p, a.shape())));
    }
    Tensor3::from_flat1(&iota(a), dims.n)
}

/// `-(last u columns of fl_1(Y))^{-1} (first p columns of fl_1(Y))`.
pub fn nu(y: &Tensor3) -> Result<DMatrix<f64>> {
    let (u, n, m) = y.dims();
    let f1 = y.flatten(1)?;
    if u > n * m {
        return Err(Error::Dimension(format!("u = {u} exceeds nm = {}", n * m)));
    }
    let p = n * m - u;
    let trailing = f1.columns(p, u).into_owned();
    if !(condition_number(&trailing) < NOT_IN_V_COND) {
        return Err(Error::Singular("trailing u x u block of fl_1(Y)".into()));
    }
    let inv = inverse(&trailing, "trailing u x u block of fl_1(Y)")?;
    Ok(-(inv * f1.columns(0, p)))
}

/// `(a_1 b; ...; a_{m-2} b; a_{m-1} b^{<= n-l})`, a vector of length `p`.
pub fn phi(a: &DVector<f64>, b: &DVector<f64>, dims: &ProblemDims) -> Result<DVector<f64>> {
    let (m, n) = (dims.m, dims.n);
    if a.len() != m || b.len() != n {
        return Err(Error::Dimension(format!(
            "phi expects a in R^{m} and b in R^{n}, got lengths {} and {}",
            a.len(),
            b.len()
        )));
    }
    let mut out = DVector::zeros(dims.p);
    for k in 0..m - 2 {
        out.rows_mut(k * n, n).copy_from(&(b * a[k]));
    }
    let tail = n - dims.l();
    out.rows_mut((m - 2) * n, tail).copy_from(&(b.rows(0, tail) * a[m - 2]));
    Ok(out)
}

fn phi_matrix(points: &[(DVector<f64>, DVector<f64>)], dims: &ProblemDims) -> Result<DMatrix<f64>> {
    let cols = points
        .iter()
        .map(|(d, a)| phi(d, a, dims))
        .collect::<Result<Vec<_>>>()?;
    Ok(DMatrix::from_columns(&cols))
}

/// Numerical rank of the span of `phi(d_j, b_j)`.
pub fn span_dimension_u(points: &[(DVector<f64>, DVector<f64>)], dims: &ProblemDims) -> Result<usize> {
    if points.is_empty() {
        return Ok(0);
    }
    Ok(numerical_rank(&phi_matrix(points, dims)?, SPAN_TOL))
}

/// Greedy column pivoting on normalized `phi` vectors: repeatedly take the
/// vector farthest from the span of those already taken.
fn select_spanning(phis: &[DVector<f64>], want: usize) -> Vec<usize> {
    let mut resid: Vec<DVector<f64>> = phis
        .iter()
        .map(|v| {
            let nrm = v.norm();
            if nrm > 0.0 {
                v / nrm
            } else {
                v.clone()
            }
        })
        .collect();
    let mut chosen = Vec::new();
    while chosen.len() < want {
        let Some((best, norm)) = resid
            .iter()
            .enumerate()
            .filter(|(i, _)| !chosen.contains(i))
            .map(|(i, r)| (i, r.norm()))
            .max_by(|x, y| x.1.total_cmp(&y.1).then(y.0.cmp(&x.0)))
        else {
            break;
        };
        if norm <= SPAN_TOL {
            break;
        }
        chosen.push(best);
        let q = &resid[best] / norm;
        for r in resid.iter_mut() {
            let c = q.dot(r);
            *r -= &q * c;
        }
    }
    chosen
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SearchStats {
    pub points_found: usize,
    pub span_dim: usize,
    pub margin: f64,
    pub relative_margin: f64,
    pub candidates: usize,
}

#[derive(Debug, Clone)]
pub struct RankCertificate {
    pub dims: ProblemDims,
    /// Pairs `(d_j, a_j)` with `M(d_j, W) a_j = 0`.
    pub points: Vec<(DVector<f64>, DVector<f64>)>,
    /// `n x p`, columns `a_j`.
    pub a: DMatrix<f64>,
    /// `m x p`, entry `(k, j)` is `(d_j)_k`, i.e. the diagonal of `D_k` in row `k`.
    pub d: DMatrix<f64>,
    pub n_matrix: DMatrix<f64>,
    pub q: DMatrix<f64>,
    pub n_condition: f64,
    /// `max_j |M(d_j, W) a_j|`.
    pub equation_residual: f64,
    /// `|T - T_hat|_F / |T|_F`.
    pub residual: f64,
    pub stats: SearchStats,
}

#[derive(Debug, Clone)]
pub enum Verdict {
    RankP(Box<RankCertificate>),
    RankExceedsP(SearchStats),
    Inconclusive { reason: String, stats: SearchStats },
}

impl Verdict {
    pub fn label(&self) -> &'static str {
        match self {
            Verdict::RankP(_) => "RankP",
            Verdict::RankExceedsP(_) => "RankExceedsP",
            Verdict::Inconclusive { .. } => "Inconclusive",
        }
    }

    pub fn stats(&self) -> &SearchStats {
        match self {
            Verdict::RankP(c) => &c.stats,
            Verdict::RankExceedsP(s) | Verdict::Inconclusive { stats: s, .. } => s,
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        let mut v = serde_json::json!({
            "verdict": self.label(),
            "stats": self.stats(),
        });
        match self {
            Verdict::RankP(c) => v["certificate"] = c.to_json(),
            Verdict::Inconclusive { reason, .. } => v["reason"] = reason.clone().into(),
            Verdict::RankExceedsP(_) => {}
        }
        v
    }
}

/// Row-major matrix as written to JSON.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MatrixJson {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl From<&DMatrix<f64>> for MatrixJson {
    fn from(m: &DMatrix<f64>) -> Self {
        let (rows, cols) = m.shape();
        Self {
            rows,
            cols,
            data: (0..rows).flat_map(|i| (0..cols).map(move |j| m[(i, j)])).collect(),
        }
    }
}

impl MatrixJson {
    pub fn to_matrix(&self) -> Result<DMatrix<f64>> {
        if self.data.len() != self.rows * self.cols {
            return Err(Error::parse("data", format!("expected {} entries", self.rows * self.cols)));
        }
        Ok(DMatrix::from_row_slice(self.rows, self.cols, &self.data))
    }
}

impl RankCertificate {
    pub fn to_json(&self) -> serde_json::Value {
        let pts: Vec<_> = self
            .points
            .iter()
            .map(|(d, a)| serde_json::json!({"d": d.as_slice(), "a": a.as_slice()}))
            .collect();
        serde_json::json!({
            "dims": self.dims,
            "points": pts,
            "A": MatrixJson::from(&self.a),
            "D": MatrixJson::from(&self.d),
            "N": MatrixJson::from(&self.n_matrix),
            "Q": MatrixJson::from(&self.q),
            "n_condition": self.n_condition,
            "equation_residual": self.equation_residual,
            "residual": self.residual,
            "stats": self.stats,
        })
    }
}

/// Rank-`p` CP factors: `T_k = sum_j C[k, j] a_j b_j^T` with `a_j`, `b_j`
/// the columns of `A` and `B`.
#[derive(Debug, Clone)]
pub struct CpFactors {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub residual: f64,
}

impl CpFactors {
    pub fn rank(&self) -> usize {
        self.a.ncols()
    }

    pub fn reconstruct(&self) -> Result<Tensor3> {
        let slices: Vec<DMatrix<f64>> = (0..self.c.nrows())
            .map(|k| {
                let mut s = DMatrix::zeros(self.a.nrows(), self.b.nrows());
                for j in 0..self.rank() {
                    s += self.c[(k, j)] * self.a.column(j) * self.b.column(j).transpose();
                }
                s
            })
            .collect();
        Tensor3::from_slices(&slices)
    }
}

fn relative_error(t: &Tensor3, that: &Tensor3) -> Result<f64> {
    let denom = t.frobenius_norm();
    let num = t.sub(that)?.frobenius_norm();
    Ok(if denom > 0.0 { num / denom } else { num })
}

/// Factors from a certificate, with the residual recomputed against `t`.
pub fn decompose(t: &Tensor3, cert: &RankCertificate) -> Result<CpFactors> {
    let dims = ProblemDims::of_tensor(t)?;
    if dims != cert.dims {
        return Err(Error::Dimension(format!("certificate is for {:?}, tensor is {:?}", cert.dims, dims)));
    }
    let (top, _) = leading_block(t, dims.p)?;
    let b = (&cert.q * top).transpose();
    let mut f = CpFactors {
        a: cert.a.clone(),
        b,
        c: cert.d.clone(),
        residual: 0.0,
    };
    f.residual = relative_error(t, &f.reconstruct()?)?;
    Ok(f)
}

fn inconclusive(reason: impl Into<String>, stats: SearchStats) -> Verdict {
    Verdict::Inconclusive {
        reason: reason.into(),
        stats,
    }
}

/// Decides between rank `p` (with an explicit certificate), rank `> p`
/// (the reduced pencil is AFCR) and inconclusive.
pub fn certify(t: &Tensor3, budget: &SearchBudget) -> Result<Verdict> {
    let dims = ProblemDims::of_tensor(t)?;
    let (top, bottom) = leading_block(t, dims.p)?;
    let s = bottom * leading_inverse(&top)?;
    let w = iota_tensor(&s, &dims)?;
    let ex = explore(&w, budget)?;

    let pairs: Vec<(DVector<f64>, DVector<f64>)> = ex.points.iter().map(|RankDropPoint { a, b, .. }| (a.clone(), b.clone())).collect();
    let mut stats = SearchStats {
        points_found: pairs.len(),
        span_dim: span_dimension_u(&pairs, &dims)?,
        margin: ex.margin.margin,
        relative_margin: ex.margin.relative,
        candidates: ex.candidates,
    };

    if ex.margin.is_afcr && pairs.is_empty() {
        return Ok(Verdict::RankExceedsP(stats));
    }
    if pairs.is_empty() {
        return Ok(inconclusive("no rank-drop points found", stats));
    }
    let phis = pairs
        .iter()
        .map(|(d, a)| phi(d, a, &dims))
        .collect::<Result<Vec<_>>>()?;
    let chosen = select_spanning(&phis, dims.p);
    stats.span_dim = stats.span_dim.max(chosen.len());
    if chosen.len() < dims.p {
        return Ok(inconclusive(format!("phi span has dimension {} < p = {}", chosen.len(), dims.p), stats));
    }

    let points: Vec<_> = chosen.iter().map(|&i| pairs[i].clone()).collect();
    let n_matrix = DMatrix::from_columns(&chosen.iter().map(|&i| phis[i].clone()).collect::<Vec<_>>());
    let n_condition = condition_number(&n_matrix);
    if !(n_condition < N_COND_LIMIT) {
        return Ok(inconclusive(format!("N is ill-conditioned (cond {n_condition:.3e})"), stats));
    }
    let q = inverse(&n_matrix, "N")?;
    let a = DMatrix::from_columns(&points.iter().map(|(_, a)| a.clone()).collect::<Vec<_>>());
    let d = DMatrix::from_columns(&points.iter().map(|(d, _)| d.clone()).collect::<Vec<_>>());

    let mut equation_residual: f64 = 0.0;
    for (dj, aj) in &points {
        equation_residual = equation_residual.max((contract_pencil(dj, &w)? * aj).norm());
    }
    let mut cert = RankCertificate {
        dims,
        points,
        a,
        d,
        n_matrix,
        q,
        n_condition,
        equation_residual,
        residual: f64::NAN,
        stats: stats.clone(),
    };
    cert.residual = decompose(t, &cert)?.residual;
    if !(equation_residual <= EQUATION_TOL) {
        return Ok(inconclusive(format!("kernel equations violated ({equation_residual:.3e})"), stats));
    }
    if !(cert.residual <= RESIDUAL_TOL) {
        return Ok(inconclusive(format!("reconstruction residual {:.3e}", cert.residual), stats));
    }
    Ok(Verdict::RankP(Box::new(cert)))
}
