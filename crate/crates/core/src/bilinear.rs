//! Bilinear maps `f: R^a x R^b -> R^c` and the tensors they correspond to.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pencil::{afcr_margin, SearchBudget};
use crate::tensor::Tensor3;

/// `f(x, y)_k = sum_{i,j} coeffs[k][i][j] x_i y_j`, with `coeffs` stored
/// row-major in `(k, i, j)` order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BilinearMap {
    pub a: usize,
    pub b: usize,
    pub c: usize,
    pub coeffs: Vec<f64>,
}

impl BilinearMap {
    pub fn new(a: usize, b: usize, c: usize, coeffs: Vec<f64>) -> Result<Self> {
        if a == 0 || b == 0 || c == 0 {
            return Err(Error::Dimension(format!("bilinear map dims must be positive, got ({a},{b},{c})")));
        }
        if coeffs.len() != a * b * c {
            return Err(Error::Dimension(format!(
                "coefficient array has {} entries, expected {}",
                coeffs.len(),
                a * b * c
            )));
        }
        Ok(Self { a, b, c, coeffs })
    }

    pub fn zero(a: usize, b: usize, c: usize) -> Self {
        Self::new(a, b, c, vec![0.0; a * b * c]).expect("positive dims")
    }

    pub fn coeff(&self, k: usize, i: usize, j: usize) -> f64 {
        self.coeffs[(k * self.a + i) * self.b + j]
    }

    fn coeff_mut(&mut self, k: usize, i: usize, j: usize) -> &mut f64 {
        &mut self.coeffs[(k * self.a + i) * self.b + j]
    }

    pub fn eval(&self, x: &[f64], y: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.a || y.len() != self.b {
            return Err(Error::Dimension(format!(
                "f expects ({}, {}) inputs, got ({}, {})",
                self.a,
                self.b,
                x.len(),
                y.len()
            )));
        }
        Ok((0..self.c)
            .map(|k| {
                let mut s = 0.0;
                for (i, xi) in x.iter().enumerate() {
                    for (j, yj) in y.iter().enumerate() {
                        s += self.coeff(k, i, j) * xi * yj;
                    }
                }
                s
            })
            .collect())
    }

    /// Cayley-Dickson multiplication on `R^d` for `d` in 1, 2, 4, 8.
    pub fn hypercomplex_mult(d: usize) -> Result<Self> {
        if !matches!(d, 1 | 2 | 4 | 8) {
            return Err(Error::Domain(format!("hypercomplex dimension must be 1, 2, 4 or 8, got {d}")));
        }
        let mut f = Self::zero(d, d, d);
        let mut ei = vec![0.0; d];
        let mut ej = vec![0.0; d];
        for i in 0..d {
            ei.fill(0.0);
            ei[i] = 1.0;
            for j in 0..d {
                ej.fill(0.0);
                ej[j] = 1.0;
                let prod = cd_mul(&ei, &ej);
                for (k, v) in prod.into_iter().enumerate() {
                    *f.coeff_mut(k, i, j) = v;
                }
            }
        }
        Ok(f)
    }

    /// Polynomial-style composition: inputs are `m` blocks of `g.a` and `n`
    /// blocks of `g.b`; output block `k` is `sum_{i+j=k} g(x_i, y_j)`.
    pub fn convolve(g: &Self, m: usize, n: usize) -> Result<Self> {
        if m == 0 || n == 0 {
            return Err(Error::Domain("convolve needs m, n >= 1".into()));
        }
        let (u, v, w) = (g.a, g.b, g.c);
        let mut f = Self::zero(m * u, n * v, (m + n - 1) * w);
        for bi in 0..m {
            for bj in 0..n {
                let blk = bi + bj;
                for r in 0..w {
                    for s in 0..u {
                        for t in 0..v {
                            *f.coeff_mut(blk * w + r, bi * u + s, bj * v + t) = g.coeff(r, s, t);
                        }
                    }
                }
            }
        }
        Ok(f)
    }

    /// Restriction to the leading `a2` and `b2` input coordinates.
    pub fn restrict(&self, a2: usize, b2: usize) -> Result<Self> {
        if a2 == 0 || a2 > self.a || b2 == 0 || b2 > self.b {
            return Err(Error::Domain(format!(
                "restriction ({a2},{b2}) must satisfy 1 <= a' <= {} and 1 <= b' <= {}",
                self.a, self.b
            )));
        }
        let mut f = Self::zero(a2, b2, self.c);
        for k in 0..self.c {
            for i in 0..a2 {
                for j in 0..b2 {
                    *f.coeff_mut(k, i, j) = self.coeff(k, i, j);
                }
            }
        }
        Ok(f)
    }

    /// The `c x a x b` tensor `T` with `f(x, y) = (sum_j y_j T_j) x`.
    pub fn as_tensor(&self) -> Tensor3 {
        let mut t = Tensor3::zeros(self.c, self.a, self.b);
        for k in 0..self.c {
            for i in 0..self.a {
                for j in 0..self.b {
                    t.set(k, i, j, self.coeff(k, i, j));
                }
            }
        }
        t
    }

    pub fn from_tensor(t: &Tensor3) -> Self {
        let (c, a, b) = t.dims();
        let mut f = Self::zero(a, b, c);
        for k in 0..c {
            for i in 0..a {
                for j in 0..b {
                    *f.coeff_mut(k, i, j) = t.get(k, i, j);
                }
            }
        }
        f
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("map serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let f: Self = serde_json::from_str(text).map_err(|e| Error::parse("bilinear map", e.to_string()))?;
        Self::new(f.a, f.b, f.c, f.coeffs).map_err(|e| Error::parse("coeffs", e.to_string()))
    }
}

/// Estimate of `min |f(x, y)|` over unit `x`, `y`.
#[derive(Debug, Clone)]
pub struct MarginEstimate {
    pub margin: f64,
    pub x: DVector<f64>,
    pub y: DVector<f64>,
    pub restarts: usize,
}

/// Multi-start estimate of the nonsingularity margin. A clearly positive value
/// is evidence (not proof) of nonsingularity.
pub fn nonsingularity_margin(f: &BilinearMap, budget: &SearchBudget) -> Result<MarginEstimate> {
    if budget.restarts == 0 {
        return Err(Error::Budget("margin estimation needs at least one restart".into()));
    }
    // Fewer outputs than inputs on either side forces a kernel.
    if f.c < f.a || f.c < f.b {
        let t = if f.c < f.a { f.clone() } else { f.swapped() };
        let tensor = t.as_tensor();
        let y = DVector::from_element(tensor.dims().2, 1.0).normalize();
        let m = crate::pencil::contract_pencil(&y, &tensor)?;
        let (_, x) = crate::linalg::min_right_singular(&m);
        let (x, y) = if f.c < f.a { (x, y) } else { (y, x) };
        return Ok(MarginEstimate {
            margin: 0.0,
            x,
            y,
            restarts: 0,
        });
    }
    let est = afcr_margin(&f.as_tensor(), budget)?;
    Ok(MarginEstimate {
        margin: est.margin,
        x: est.kernel,
        y: est.argmin,
        restarts: est.restarts,
    })
}

impl BilinearMap {
    /// `(y, x) -> f(x, y)`.
    fn swapped(&self) -> Self {
        let mut g = Self::zero(self.b, self.a, self.c);
        for k in 0..self.c {
            for i in 0..self.a {
                for j in 0..self.b {
                    *g.coeff_mut(k, j, i) = self.coeff(k, i, j);
                }
            }
        }
        g
    }
}

fn cd_conj(x: &[f64]) -> Vec<f64> {
    if x.len() == 1 {
        return x.to_vec();
    }
    let h = x.len() / 2;
    let mut out = cd_conj(&x[..h]);
    out.extend(x[h..].iter().map(|v| -v));
    out
}

/// `(a, b)(c, d) = (ac - conj(d) b, d a + b conj(c))`.
fn cd_mul(x: &[f64], y: &[f64]) -> Vec<f64> {
    if x.len() == 1 {
        return vec![x[0] * y[0]];
    }
    let h = x.len() / 2;
    let (a, b) = x.split_at(h);
    let (c, d) = y.split_at(h);
    let ac = cd_mul(a, c);
    let db = cd_mul(&cd_conj(d), b);
    let da = cd_mul(d, a);
    let bc = cd_mul(b, &cd_conj(c));
    let mut out: Vec<f64> = ac.iter().zip(&db).map(|(p, q)| p - q).collect();
    out.extend(da.iter().zip(&bc).map(|(p, q)| p + q));
    out
}
