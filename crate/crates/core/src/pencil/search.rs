//! Numerical search over the unit sphere for small `sigma_n(M(a, Y))`.
//!
//! Each restart alternates between the two convex subproblems of
//! `min |M(a, Y) b|` with `|a| = |b| = 1` (each is a smallest singular vector
//! computation) and finishes with Gauss-Newton on the bilinear system
//! `M(a, Y) b = 0`; each restart also runs plain Gauss-Newton from a random
//! `(a, b)`. Further candidates come from real generalized eigenvalues along
//! random lines. The search runs on a balanced copy of the pencil and maps
//! results back.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{
    condition_number, gaussian_matrix, min_norm_solve, min_right_singular, normalize, projective_distance, right_svd, rng_for,
    unit_vector,
};
use crate::tensor::Tensor3;

use super::{check_pencil_shape, ProblemDims};

const LINE_STREAM: u64 = 0x6c69_6e65;
const DEDUP_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchBudget {
    pub restarts: usize,
    /// Random lines for the square-pencil eigenvalue path.
    pub lines: usize,
    pub seed: u64,
    /// `sigma_n / sigma_1` below this declares a rank drop.
    pub tol_rankdrop: f64,
    /// Scale-free margin above this declares AFCR.
    pub tol_margin: f64,
    pub max_iters: usize,
}

impl Default for SearchBudget {
    fn default() -> Self {
        Self {
            restarts: 300,
            lines: 20,
            seed: 0,
            tol_rankdrop: 1e-8,
            tol_margin: 1e-6,
            max_iters: 200,
        }
    }
}

impl SearchBudget {
    pub fn with_restarts(restarts: usize) -> Self {
        Self {
            restarts,
            ..Self::default()
        }
    }

    pub fn seeded(self, seed: u64) -> Self {
        Self { seed, ..self }
    }
}

#[derive(Debug, Clone)]
pub struct AfcrMargin {
    /// Smallest `sigma_n(M(a, Y))` found over unit `a`.
    pub margin: f64,
    /// Scale-free margin: the smallest `sigma_n` found for the balanced
    /// pencil (orthonormal slices, balanced row and column Gram matrices)
    /// divided by its Frobenius norm. AFCR is decided on this value.
    pub relative: f64,
    pub argmin: DVector<f64>,
    /// Smallest right singular vector of `M(argmin, Y)`.
    pub kernel: DVector<f64>,
    pub restarts: usize,
    pub is_afcr: bool,
}

#[derive(Debug, Clone)]
pub struct RankDropPoint {
    pub a: DVector<f64>,
    pub b: DVector<f64>,
    /// `|M(a, Y) b| / |Y|_F`.
    pub quality: f64,
}

#[derive(Debug, Clone)]
pub struct Exploration {
    pub margin: AfcrMargin,
    pub points: Vec<RankDropPoint>,
    /// Local minimizers examined, before deduplication.
    pub candidates: usize,
}

struct Candidate {
    a: DVector<f64>,
    sigma_min: f64,
    sigma_max: f64,
}

struct Pencil {
    slices: Vec<DMatrix<f64>>,
    u: usize,
    n: usize,
    norm: f64,
}

impl Pencil {
    fn new(slices: Vec<DMatrix<f64>>) -> Self {
        let (u, n) = slices[0].shape();
        let norm = slices.iter().map(|s| s.norm_squared()).sum::<f64>().sqrt();
        Self { slices, u, n, norm }
    }

    /// An equivalent pencil with orthonormal slices and balanced row and
    /// column Gram matrices, plus the matrix `G` with
    /// `M(a', balanced) = L M(G a', Y) R` for invertible `L`, `R`.
    /// Rank drops correspond exactly under `a = G a'`.
    fn balanced(&self) -> (Pencil, DMatrix<f64>) {
        let m = self.m();
        let mut slices = self.slices.clone();
        let mut g = DMatrix::identity(m, m);
        for _ in 0..4 {
            let gram = DMatrix::from_fn(m, m, |k, l| slices[k].dot(&slices[l]));
            if let Some(w) = inverse_sqrt(&gram) {
                slices = (0..m)
                    .map(|j| {
                        let mut acc = DMatrix::zeros(self.u, self.n);
                        for (k, s) in slices.iter().enumerate() {
                            acc += s * w[(k, j)];
                        }
                        acc
                    })
                    .collect();
                g *= w;
            }
            let rows: DMatrix<f64> = slices.iter().map(|s| s * s.transpose()).sum();
            if let Some(l) = inverse_sqrt(&rows) {
                slices.iter_mut().for_each(|s| *s = &l * &*s);
            }
            let cols: DMatrix<f64> = slices.iter().map(|s| s.transpose() * s).sum();
            if let Some(r) = inverse_sqrt(&cols) {
                slices.iter_mut().for_each(|s| *s = &*s * &r);
            }
        }
        (Pencil::new(slices), g)
    }

    fn m(&self) -> usize {
        self.slices.len()
    }

    fn at(&self, a: &DVector<f64>) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.u, self.n);
        for (ak, s) in a.iter().zip(&self.slices) {
            out += s * *ak;
        }
        out
    }

    /// Columns `Y_k b`, so that `M(a, Y) b = C(b) a`.
    fn columns(&self, b: &DVector<f64>) -> DMatrix<f64> {
        let mut c = DMatrix::zeros(self.u, self.m());
        for (k, s) in self.slices.iter().enumerate() {
            c.set_column(k, &(s * b));
        }
        c
    }

    fn evaluate(&self, a: DVector<f64>) -> Candidate {
        let (values, _) = right_svd(&self.at(&a));
        Candidate {
            sigma_min: values[self.n - 1],
            sigma_max: values[0],
            a,
        }
    }

    fn alternate(&self, mut a: DVector<f64>, max_iters: usize) -> (DVector<f64>, DVector<f64>) {
        let mut b = min_right_singular(&self.at(&a)).1;
        let mut prev = f64::INFINITY;
        for _ in 0..max_iters {
            let c = self.columns(&b);
            a = min_right_singular(&c).1;
            b = min_right_singular(&self.at(&a)).1;
            let obj = (self.at(&a) * &b).norm();
            if obj <= 1e-15 * self.norm || prev - obj <= 1e-12 * prev {
                break;
            }
            prev = obj;
        }
        (a, b)
    }

    /// Gauss-Newton on `F(a, b) = (M(a) b, (|a|^2 - 1)/2, (|b|^2 - 1)/2)`,
    /// accepting a step only when it lowers `|M(a) b|`.
    fn polish(&self, mut a: DVector<f64>, mut b: DVector<f64>) -> (DVector<f64>, DVector<f64>) {
        let (m, n, u) = (self.m(), self.n, self.u);
        let mut res = (self.at(&a) * &b).norm();
        for _ in 0..30 {
            if res <= 1e-15 * self.norm {
                break;
            }
            let ma = self.at(&a);
            let mut f = DVector::zeros(u + 2);
            f.rows_mut(0, u).copy_from(&(&ma * &b));
            f[u] = 0.5 * (a.norm_squared() - 1.0);
            f[u + 1] = 0.5 * (b.norm_squared() - 1.0);
            let mut j = DMatrix::zeros(u + 2, m + n);
            j.view_mut((0, 0), (u, m)).copy_from(&self.columns(&b));
            j.view_mut((0, m), (u, n)).copy_from(&ma);
            j.view_mut((u, 0), (1, m)).copy_from(&a.transpose());
            j.view_mut((u + 1, m), (1, n)).copy_from(&b.transpose());
            let step = min_norm_solve(&j, &f);
            let a2 = normalize(&(&a - step.rows(0, m)));
            let b2 = normalize(&(&b - step.rows(m, n)));
            let res2 = (self.at(&a2) * &b2).norm();
            if !(res2 < res) {
                break;
            }
            (a, b, res) = (a2, b2, res2);
        }
        (a, b)
    }

    /// Undamped Gauss-Newton on the same system from an arbitrary start.
    /// Its basins of attraction differ from those of [`Self::alternate`],
    /// which matters for isolated points sitting in narrow valleys.
    fn newton(&self, mut a: DVector<f64>, mut b: DVector<f64>) -> Candidate {
        let (m, n, u) = (self.m(), self.n, self.u);
        for _ in 0..60 {
            let ma = self.at(&a);
            let mut f = DVector::zeros(u + 2);
            f.rows_mut(0, u).copy_from(&(&ma * &b));
            f[u] = 0.5 * (a.norm_squared() - 1.0);
            f[u + 1] = 0.5 * (b.norm_squared() - 1.0);
            if f.norm() <= 1e-15 * self.norm {
                break;
            }
            let mut j = DMatrix::zeros(u + 2, m + n);
            j.view_mut((0, 0), (u, m)).copy_from(&self.columns(&b));
            j.view_mut((0, m), (u, n)).copy_from(&ma);
            j.view_mut((u, 0), (1, m)).copy_from(&a.transpose());
            j.view_mut((u + 1, m), (1, n)).copy_from(&b.transpose());
            let step = min_norm_solve(&j, &f);
            let a2 = normalize(&(&a - step.rows(0, m)));
            let b2 = normalize(&(&b - step.rows(m, n)));
            if !(a2.iter().chain(b2.iter()).all(|x| x.is_finite()) && a2.norm() > 0.5 && b2.norm() > 0.5) {
                break;
            }
            (a, b) = (a2, b2);
        }
        let (a, _) = self.polish(a, b);
        self.evaluate(a)
    }

    fn local_min(&self, a0: DVector<f64>, max_iters: usize) -> Candidate {
        let (a, b) = self.alternate(a0, max_iters);
        let (a, _) = self.polish(a, b);
        self.evaluate(a)
    }

    /// Real roots of `det R M(p + t q) = 0` on one random line, refined
    /// locally. For square pencils `R` is the identity and the roots are
    /// exact rank-drop points; for tall ones `R` is a random `n x u`
    /// compression and the roots only seed the local solver.
    fn line_candidates(&self, seed: u64, line: usize, max_iters: usize) -> Vec<Candidate> {
        let mut rng = rng_for(seed ^ LINE_STREAM, line as u64);
        let p = unit_vector(&mut rng, self.m());
        let q = unit_vector(&mut rng, self.m());
        let square = self.u == self.n;
        let r = if square {
            DMatrix::identity(self.n, self.n)
        } else {
            gaussian_matrix(&mut rng, self.n, self.u)
        };
        let mq = &r * self.at(&q);
        if condition_number(&mq) > 1e12 {
            return Vec::new();
        }
        let Some(inv) = mq.try_inverse() else { return Vec::new() };
        let k = -(inv * (&r * self.at(&p)));
        k.complex_eigenvalues()
            .iter()
            .filter(|z| z.im.abs() <= 1e-6 * (1.0 + z.re.abs()))
            .map(|z| {
                let a = normalize(&(&p + &q * z.re));
                if square {
                    let b = min_right_singular(&self.at(&a)).1;
                    let (a, _) = self.polish(a, b);
                    self.evaluate(a)
                } else {
                    self.local_min(a, max_iters)
                }
            })
            .collect()
    }
}

/// `S^{-1/2}` for symmetric positive definite `S`, `None` when `S` is
/// numerically singular.
fn inverse_sqrt(s: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let eig = s.clone().symmetric_eigen();
    let top = eig.eigenvalues.max();
    if !(top > 0.0) || eig.eigenvalues.min() <= 1e-14 * top {
        return None;
    }
    let d = DMatrix::from_diagonal(&eig.eigenvalues.map(|x| 1.0 / x.sqrt()));
    Some(&eig.eigenvectors * d * eig.eigenvectors.transpose())
}

/// Runs the full search once and reports both the margin estimate and the
/// deduplicated rank-drop points.
pub fn explore(y: &Tensor3, budget: &SearchBudget) -> Result<Exploration> {
    let (u, n, m) = y.dims();
    if u < n {
        return Err(Error::Dimension(format!("pencil search needs u >= n, got {u} x {n}")));
    }
    if budget.restarts == 0 {
        return Err(Error::Budget("at least one restart is required".into()));
    }
    let pencil = Pencil::new(y.slices());
    let (bal, g) = pencil.balanced();

    let mut found: Vec<Candidate> = Vec::new();
    if m >= 2 {
        let per_line: Vec<Vec<Candidate>> = (0..budget.lines)
            .into_par_iter()
            .map(|i| bal.line_candidates(budget.seed, i, budget.max_iters))
            .collect();
        found.extend(per_line.into_iter().flatten());
    }
    let starts: Vec<[Candidate; 2]> = (0..budget.restarts)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng_for(budget.seed, i as u64);
            let a0 = unit_vector(&mut rng, m);
            let b0 = unit_vector(&mut rng, n);
            [bal.local_min(a0.clone(), budget.max_iters), bal.newton(a0, b0)]
        })
        .collect();
    found.extend(starts.into_iter().flatten());

    let best_balanced = found
        .iter()
        .map(|c| c.sigma_min)
        .fold(f64::INFINITY, f64::min);
    let relative = if bal.norm > 0.0 { best_balanced / bal.norm } else { 0.0 };

    // Back to the original coordinates, with a final polish there.
    let candidates: Vec<Candidate> = found
        .par_iter()
        .map(|c| {
            let a = normalize(&(&g * &c.a));
            let b = min_right_singular(&pencil.at(&a)).1;
            pencil.evaluate(pencil.polish(a, b).0)
        })
        .collect();
    let best = candidates
        .iter()
        .min_by(|x, y| x.sigma_min.total_cmp(&y.sigma_min))
        .expect("at least one restart");
    let kernel = min_right_singular(&pencil.at(&best.a)).1;
    let margin = AfcrMargin {
        margin: best.sigma_min,
        relative,
        argmin: best.a.clone(),
        kernel,
        restarts: budget.restarts,
        is_afcr: relative > budget.tol_margin,
    };

    let mut kept: Vec<DVector<f64>> = Vec::new();
    let mut points = Vec::new();
    for c in &candidates {
        let dropped = c.sigma_max == 0.0 || c.sigma_min < budget.tol_rankdrop * c.sigma_max;
        if !dropped || kept.iter().any(|k| projective_distance(k, &c.a) < DEDUP_TOL) {
            continue;
        }
        kept.push(c.a.clone());
        let ma = pencil.at(&c.a);
        let (values, vecs) = right_svd(&ma);
        for idx in (0..n).rev() {
            if idx != n - 1 && values[idx] >= budget.tol_rankdrop * c.sigma_max {
                break;
            }
            let b = vecs.column(idx).into_owned();
            let quality = (&ma * &b).norm() / pencil.norm.max(f64::MIN_POSITIVE);
            points.push(RankDropPoint {
                a: c.a.clone(),
                b,
                quality,
            });
        }
    }
    Ok(Exploration {
        margin,
        points,
        candidates: candidates.len(),
    })
}

/// Best-found minimum of `sigma_n(M(a, Y))` over the unit sphere.
pub fn afcr_margin(y: &Tensor3, budget: &SearchBudget) -> Result<AfcrMargin> {
    Ok(explore(y, budget)?.margin)
}

/// Distinct projective points where `M(a, Y)` drops rank, each with a unit
/// kernel vector. An empty result means nothing was found, not that no
/// point exists.
pub fn rank_drop_search(y: &Tensor3, dims: &ProblemDims, budget: &SearchBudget) -> Result<Vec<RankDropPoint>> {
    check_pencil_shape(y, dims)?;
    if dims.v() >= dims.m {
        return Err(Error::Domain(format!("need v < m, got v = {}, m = {}", dims.v(), dims.m)));
    }
    Ok(explore(y, budget)?.points)
}
