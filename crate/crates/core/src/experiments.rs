//! Monte-Carlo harness: Gaussian sampling, an ALS rank oracle, a Terracini
//! generic-rank check and a reproducible experiment runner.

use std::path::PathBuf;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::certify::{certify, sigma, Verdict};
use crate::error::{Error, Result};
use crate::hopf::HashBoundsTable;
use crate::linalg::{gaussian_matrix, gaussian_vector, numerical_rank, rng_for};
use crate::pencil::{ProblemDims, SearchBudget};
use crate::tensor::Tensor3;
use crate::trank::classify;

const ALS_STREAM: u64 = 0x616c_7300;
const CERT_STREAM: u64 = 0x6365_7274;
const TERRACINI_SEED: u64 = 0x7465_7272;
/// ALS residual below which a rank-`r` fit counts as reached.
pub const ALS_FIT_TOL: f64 = 1e-3;

/// iid standard normal `d1 x d2 x d3` tensor. For shapes the certifier
/// handles, samples whose leading block is numerically singular are redrawn.
pub fn sample_gaussian_tensor(shape: [usize; 3], rng: &mut impl Rng) -> Tensor3 {
    let [d1, d2, d3] = shape;
    let in_range = ProblemDims::new(d3, d1, d2).is_ok();
    loop {
        let t = Tensor3::new(d1, d2, d3, gaussian_vector(rng, d1 * d2 * d3).as_slice().to_vec())
            .expect("positive shape");
        if !in_range || sigma(&t).is_ok() {
            return t;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AlsBudget {
    pub restarts: usize,
    pub sweeps: usize,
    /// Stop when the residual improves by less than this between sweeps.
    pub stagnation: f64,
    /// Levenberg-Marquardt iterations applied to each restart after the sweeps.
    pub refine_iters: usize,
    pub seed: u64,
}

impl Default for AlsBudget {
    fn default() -> Self {
        Self {
            restarts: 5,
            sweeps: 500,
            stagnation: 1e-12,
            refine_iters: 200,
            seed: 0,
        }
    }
}

/// Unfolding-free MTTKRP: `out[i, r] = sum_{j,k} T[i,j,k] * X[j,r] * Y[k,r]`
/// with the free index in mode `mode`.
fn mttkrp(t: &Tensor3, mode: usize, x: &DMatrix<f64>, y: &DMatrix<f64>) -> DMatrix<f64> {
    let (d1, d2, d3) = t.dims();
    let r = x.ncols();
    let size = [d1, d2, d3][mode];
    let mut out = DMatrix::zeros(size, r);
    let data = t.data();
    for k in 0..d3 {
        for i in 0..d1 {
            for j in 0..d2 {
                let v = data[k * d1 * d2 + i * d2 + j];
                if v == 0.0 {
                    continue;
                }
                let (free, a, b) = match mode {
                    0 => (i, j, k),
                    1 => (j, i, k),
                    _ => (k, i, j),
                };
                for c in 0..r {
                    out[(free, c)] += v * x[(a, c)] * y[(b, c)];
                }
            }
        }
    }
    out
}

fn cp_residual(t: &Tensor3, a: &DMatrix<f64>, b: &DMatrix<f64>, c: &DMatrix<f64>) -> f64 {
    let (d1, d2, d3) = t.dims();
    let mut err = 0.0;
    for k in 0..d3 {
        let slice = a * DMatrix::from_diagonal(&c.row(k).transpose()) * b.transpose();
        for i in 0..d1 {
            for j in 0..d2 {
                let d = t.get(i, j, k) - slice[(i, j)];
                err += d * d;
            }
        }
    }
    let norm = t.frobenius_norm();
    if norm > 0.0 {
        err.sqrt() / norm
    } else {
        err.sqrt()
    }
}

fn solve_factor(mtt: DMatrix<f64>, g1: &DMatrix<f64>, g2: &DMatrix<f64>) -> DMatrix<f64> {
    let gram = g1.component_mul(g2);
    let eps = 1e-14 * gram.norm().max(f64::MIN_POSITIVE);
    let pinv = gram.pseudo_inverse(eps).expect("non-negative eps");
    mtt * pinv
}

fn als_sweep(t: &Tensor3, b: &DMatrix<f64>, c: &DMatrix<f64>) -> [DMatrix<f64>; 3] {
    let a = solve_factor(mttkrp(t, 0, b, c), &(b.transpose() * b), &(c.transpose() * c));
    let b = solve_factor(mttkrp(t, 1, &a, c), &(a.transpose() * &a), &(c.transpose() * c));
    let c = solve_factor(mttkrp(t, 2, &a, &b), &(a.transpose() * &a), &(b.transpose() * &b));
    [a, b, c]
}

/// Entrywise reconstruction `sum_r A[i,r] B[j,r] C[k,r]` in slice-major order.
fn reconstruct(dims: (usize, usize, usize), f: &[DMatrix<f64>; 3]) -> Vec<f64> {
    let (d1, d2, d3) = dims;
    let mut out = Vec::with_capacity(d1 * d2 * d3);
    for k in 0..d3 {
        let slice = &f[0] * DMatrix::from_diagonal(&f[2].row(k).transpose()) * f[1].transpose();
        for i in 0..d1 {
            for j in 0..d2 {
                out.push(slice[(i, j)]);
            }
        }
    }
    out
}

/// Exact line search along `x + s * dir`. The residual is cubic in `s`
/// entrywise, so its squared norm is a degree-6 polynomial whose critical
/// points come from a companion-matrix eigenproblem.
fn line_search(t: &Tensor3, x: &[DMatrix<f64>; 3], dir: &[DMatrix<f64>; 3]) -> f64 {
    let at = |s: f64| -> Vec<f64> {
        let f = [&x[0] + &dir[0] * s, &x[1] + &dir[1] * s, &x[2] + &dir[2] * s];
        let rec = reconstruct(t.dims(), &f);
        t.data().iter().zip(rec).map(|(a, b)| a - b).collect()
    };
    let (r0, r1, rm, r2) = (at(0.0), at(1.0), at(-1.0), at(2.0));
    // Cubic coefficients per entry from the values at s = 0, 1, -1, 2.
    let mut poly = [0.0; 7];
    for e in 0..r0.len() {
        let c0 = r0[e];
        let c2 = (r1[e] + rm[e]) / 2.0 - c0;
        let odd = (r1[e] - rm[e]) / 2.0;
        let c3 = (r2[e] - c0 - 4.0 * c2 - 2.0 * odd) / 6.0;
        let c1 = odd - c3;
        let c = [c0, c1, c2, c3];
        for i in 0..4 {
            for j in 0..4 {
                poly[i + j] += c[i] * c[j];
            }
        }
    }
    let value = |s: f64| poly.iter().rev().fold(0.0, |acc, c| acc * s + c);
    if poly[6].abs() < f64::MIN_POSITIVE {
        return 1.0;
    }
    // Derivative has degree 5; roots are eigenvalues of its companion matrix.
    let d: Vec<f64> = (1..7).map(|i| i as f64 * poly[i]).collect();
    let mut comp = DMatrix::zeros(5, 5);
    for i in 0..5 {
        comp[(0, i)] = -d[4 - i] / d[5];
        if i > 0 {
            comp[(i, i - 1)] = 1.0;
        }
    }
    comp.complex_eigenvalues()
        .iter()
        .filter(|z| z.im.abs() <= 1e-8 * (1.0 + z.re.abs()))
        .map(|z| z.re)
        .chain([1.0])
        .min_by(|a, b| value(*a).total_cmp(&value(*b)))
        .unwrap_or(1.0)
}

/// One ALS restart. Each sweep's step is followed by an exact line search
/// along the same direction.
fn als_run(t: &Tensor3, b: DMatrix<f64>, c: DMatrix<f64>, budget: &AlsBudget) -> ([DMatrix<f64>; 3], f64) {
    let mut cur = als_sweep(t, &b, &c);
    let mut res = cp_residual(t, &cur[0], &cur[1], &cur[2]);
    for _ in 1..budget.sweeps {
        if res < 1e-14 {
            break;
        }
        let next = als_sweep(t, &cur[1], &cur[2]);
        let dir = [&next[0] - &cur[0], &next[1] - &cur[1], &next[2] - &cur[2]];
        let s = line_search(t, &cur, &dir);
        let jump = [&cur[0] + &dir[0] * s, &cur[1] + &dir[1] * s, &cur[2] + &dir[2] * s];
        let next_res = cp_residual(t, &next[0], &next[1], &next[2]);
        let jump_res = cp_residual(t, &jump[0], &jump[1], &jump[2]);
        let prev = res;
        (cur, res) = if jump_res < next_res { (jump, jump_res) } else { (next, next_res) };
        if (prev - res).abs() < budget.stagnation {
            break;
        }
    }
    (cur, res)
}

fn residual_vector(t: &Tensor3, f: &[DMatrix<f64>; 3]) -> DVector<f64> {
    let rec = reconstruct(t.dims(), f);
    DVector::from_iterator(rec.len(), t.data().iter().zip(rec).map(|(a, b)| a - b))
}

/// Levenberg-Marquardt on all factor entries jointly. Once ALS is near an
/// exact decomposition this converges in a few steps where ALS crawls.
fn lm_refine(t: &Tensor3, mut f: [DMatrix<f64>; 3], iters: usize) -> f64 {
    let (d1, d2, d3) = t.dims();
    let r = f[0].ncols();
    let norm = t.frobenius_norm().max(f64::MIN_POSITIVE);
    let per_term = d1 + d2 + d3;
    let mut resid = residual_vector(t, &f);
    let mut cost = resid.norm();
    let mut lambda = 1e-3;
    for _ in 0..iters {
        if cost / norm < 1e-14 {
            break;
        }
        let mut jac = DMatrix::zeros(d1 * d2 * d3, r * per_term);
        for q in 0..r {
            let base = q * per_term;
            for k in 0..d3 {
                for i in 0..d1 {
                    for j in 0..d2 {
                        let row = (k * d1 + i) * d2 + j;
                        jac[(row, base + i)] = f[1][(j, q)] * f[2][(k, q)];
                        jac[(row, base + d1 + j)] = f[0][(i, q)] * f[2][(k, q)];
                        jac[(row, base + d1 + d2 + k)] = f[0][(i, q)] * f[1][(j, q)];
                    }
                }
            }
        }
        let jtj = jac.transpose() * &jac;
        let jtr = jac.transpose() * &resid;
        let mut improved = false;
        for _ in 0..10 {
            let mut lhs = jtj.clone();
            for d in 0..lhs.nrows() {
                lhs[(d, d)] += lambda * (1.0 + jtj[(d, d)]);
            }
            let Some(step) = lhs.cholesky().map(|ch| ch.solve(&jtr)) else {
                lambda *= 10.0;
                continue;
            };
            let mut trial = f.clone();
            for q in 0..r {
                let base = q * per_term;
                for i in 0..d1 {
                    trial[0][(i, q)] += step[base + i];
                }
                for j in 0..d2 {
                    trial[1][(j, q)] += step[base + d1 + j];
                }
                for k in 0..d3 {
                    trial[2][(k, q)] += step[base + d1 + d2 + k];
                }
            }
            let trial_resid = residual_vector(t, &trial);
            let trial_cost = trial_resid.norm();
            if trial_cost < cost {
                f = trial;
                resid = trial_resid;
                let gain = cost - trial_cost;
                cost = trial_cost;
                lambda = (lambda / 3.0).max(1e-15);
                improved = gain > 1e-14 * norm;
                break;
            }
            lambda *= 4.0;
        }
        if !improved {
            break;
        }
    }
    cost / norm
}

/// Best relative residual `|T - T_r|_F / |T|_F` of a rank-`r` CP model over
/// restarts of ALS (with exact line search) followed by a short
/// Levenberg-Marquardt refinement.
pub fn als_fit(t: &Tensor3, r: usize, budget: &AlsBudget) -> Result<f64> {
    if r == 0 {
        return Err(Error::Domain("ALS rank must be at least 1".into()));
    }
    if budget.restarts == 0 {
        return Err(Error::Budget("ALS needs at least one restart".into()));
    }
    let (_, d2, d3) = t.dims();
    let best = (0..budget.restarts)
        .map(|s| {
            let mut rng = rng_for(budget.seed ^ ALS_STREAM, s as u64);
            let b = gaussian_matrix(&mut rng, d2, r);
            let c = gaussian_matrix(&mut rng, d3, r);
            let (factors, als_res) = als_run(t, b, c, budget);
            let res = if budget.refine_iters > 0 && als_res.is_finite() {
                lm_refine(t, factors, budget.refine_iters).min(als_res)
            } else {
                als_res
            };
            if res.is_finite() {
                res
            } else {
                1.0
            }
        })
        .fold(f64::INFINITY, f64::min);
    Ok(best)
}

/// Smallest `r` for which the differential of the rank-`r` CP map at a
/// random point has full rank `d1 d2 d3` (relative threshold `1e-8`).
pub fn terracini_generic_rank(d1: usize, d2: usize, d3: usize) -> Result<usize> {
    terracini_generic_rank_seeded(d1, d2, d3, TERRACINI_SEED)
}

pub fn terracini_generic_rank_seeded(d1: usize, d2: usize, d3: usize, seed: u64) -> Result<usize> {
    if d1 == 0 || d2 == 0 || d3 == 0 {
        return Err(Error::Domain(format!("dimensions must be positive, got ({d1}, {d2}, {d3})")));
    }
    let total = d1 * d2 * d3;
    let per_term = d1 + d2 + d3;
    // Each term contributes at most d1 + d2 + d3 - 2 independent directions.
    let start = total.div_ceil((per_term - 2).max(1)).max(1);
    let idx = |i: usize, j: usize, k: usize| (k * d1 + i) * d2 + j;
    for r in start..=total {
        let mut rng = rng_for(seed, r as u64);
        let a = gaussian_matrix(&mut rng, d1, r);
        let b = gaussian_matrix(&mut rng, d2, r);
        let c = gaussian_matrix(&mut rng, d3, r);
        let mut jac = DMatrix::zeros(total, r * per_term);
        for t in 0..r {
            let base = t * per_term;
            for i in 0..d1 {
                for j in 0..d2 {
                    for k in 0..d3 {
                        let row = idx(i, j, k);
                        jac[(row, base + i)] = b[(j, t)] * c[(k, t)];
                        jac[(row, base + d1 + j)] = a[(i, t)] * c[(k, t)];
                        jac[(row, base + d1 + d2 + k)] = a[(i, t)] * b[(j, t)];
                    }
                }
            }
        }
        if numerical_rank(&jac, 1e-8) == total {
            return Ok(r);
        }
    }
    Ok(total)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Sampled tensor shape `d1 x d2 x d3`, read as `n x p x m`.
    pub shape: [usize; 3],
    pub samples: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_restarts")]
    pub restarts: usize,
    #[serde(default = "default_lines")]
    pub lines: usize,
    #[serde(default = "default_tol_rankdrop")]
    pub tol_rankdrop: f64,
    #[serde(default)]
    pub als: AlsBudget,
    /// Record per-sample wall-clock time. Off by default so that output
    /// files are byte-identical for a fixed seed.
    #[serde(default)]
    pub timing: bool,
    #[serde(default)]
    pub csv_path: Option<PathBuf>,
    #[serde(default)]
    pub summary_path: Option<PathBuf>,
}

fn default_restarts() -> usize {
    SearchBudget::default().restarts
}

fn default_lines() -> usize {
    SearchBudget::default().lines
}

fn default_tol_rankdrop() -> f64 {
    SearchBudget::default().tol_rankdrop
}

impl ExperimentConfig {
    pub fn new(shape: [usize; 3], samples: usize, seed: u64) -> Self {
        Self {
            shape,
            samples,
            seed,
            restarts: default_restarts(),
            lines: default_lines(),
            tol_rankdrop: default_tol_rankdrop(),
            als: AlsBudget::default(),
            timing: false,
            csv_path: None,
            summary_path: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::parse("experiment config", e.to_string()))
    }

    fn dims(&self) -> Result<ProblemDims> {
        let [n, p, m] = self.shape;
        ProblemDims::new(m, n, p)
    }

    fn validate(&self) -> Result<ProblemDims> {
        if self.samples == 0 {
            return Err(Error::parse("samples", "must be at least 1"));
        }
        if self.restarts == 0 {
            return Err(Error::parse("restarts", "must be at least 1"));
        }
        self.dims().map_err(|e| Error::parse("shape", e.to_string()))
    }

    fn budget(&self, sample: u64) -> SearchBudget {
        SearchBudget {
            restarts: self.restarts,
            lines: self.lines,
            seed: rng_for(self.seed ^ CERT_STREAM, sample).random(),
            tol_rankdrop: self.tol_rankdrop,
            ..SearchBudget::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampleRow {
    pub sample_id: usize,
    pub verdict: String,
    pub cert_residual: Option<f64>,
    pub als_p: f64,
    pub als_p1: f64,
    pub points_found: usize,
    pub span_dim: usize,
    pub wall_ms: u64,
    /// Not written to CSV; used for the mutual-exclusion check.
    #[serde(skip)]
    pub relative_margin: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerdictCounts {
    pub rank_p: usize,
    pub rank_exceeds_p: usize,
    pub inconclusive: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub counts: VerdictCounts,
    pub frequencies: [f64; 3],
    pub prediction: String,
    pub max_cert_residual: f64,
    /// Fraction of RankP samples where ALS reached rank `p` (residual < 1e-3).
    pub als_agrees_rank_p: Option<f64>,
    /// Fraction of RankExceedsP samples where ALS did not reach rank `p`.
    pub als_agrees_exceeds: Option<f64>,
    #[serde(skip)]
    pub rows: Vec<SampleRow>,
}

fn run_sample(cfg: &ExperimentConfig, dims: &ProblemDims, id: usize) -> Result<SampleRow> {
    let started = Instant::now();
    let mut rng = rng_for(cfg.seed, id as u64);
    let t = sample_gaussian_tensor(cfg.shape, &mut rng);
    let verdict = certify(&t, &cfg.budget(id as u64))?;
    let als = AlsBudget {
        seed: rng.random(),
        ..cfg.als
    };
    let als_p = als_fit(&t, dims.p, &als)?;
    let als_p1 = als_fit(&t, dims.p + 1, &als)?;
    let stats = verdict.stats();
    Ok(SampleRow {
        sample_id: id,
        verdict: verdict.label().to_string(),
        cert_residual: match &verdict {
            Verdict::RankP(c) => Some(c.residual),
            _ => None,
        },
        als_p,
        als_p1,
        points_found: stats.points_found,
        span_dim: stats.span_dim,
        wall_ms: if cfg.timing { started.elapsed().as_millis() as u64 } else { 0 },
        relative_margin: stats.relative_margin,
    })
}

fn fraction(hits: usize, total: usize) -> Option<f64> {
    (total > 0).then(|| hits as f64 / total as f64)
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let dims = cfg.validate()?;
    let rows = (0..cfg.samples)
        .into_par_iter()
        .map(|id| run_sample(cfg, &dims, id))
        .collect::<Result<Vec<_>>>()?;

    let count = |label: &str| rows.iter().filter(|r| r.verdict == label).count();
    let counts = VerdictCounts {
        rank_p: count("RankP"),
        rank_exceeds_p: count("RankExceedsP"),
        inconclusive: count("Inconclusive"),
    };
    let total = rows.len() as f64;
    let frequencies = [
        counts.rank_p as f64 / total,
        counts.rank_exceeds_p as f64 / total,
        counts.inconclusive as f64 / total,
    ];
    let table = HashBoundsTable::build(dims.n.max(2))?;
    let prediction = classify(dims.m, dims.n, dims.p, &table)?.to_string();
    let max_cert_residual = rows.iter().filter_map(|r| r.cert_residual).fold(0.0, f64::max);
    let als_agrees_rank_p = fraction(
        rows.iter().filter(|r| r.verdict == "RankP" && r.als_p < ALS_FIT_TOL).count(),
        counts.rank_p,
    );
    let als_agrees_exceeds = fraction(
        rows.iter().filter(|r| r.verdict == "RankExceedsP" && r.als_p >= ALS_FIT_TOL).count(),
        counts.rank_exceeds_p,
    );
    let report = ExperimentReport {
        config: cfg.clone(),
        counts,
        frequencies,
        prediction,
        max_cert_residual,
        als_agrees_rank_p,
        als_agrees_exceeds,
        rows,
    };
    if let Some(path) = &cfg.csv_path {
        std::fs::write(path, report.csv()?).map_err(|e| Error::io(path, e))?;
    }
    if let Some(path) = &cfg.summary_path {
        std::fs::write(path, report.summary_json()).map_err(|e| Error::io(path, e))?;
    }
    Ok(report)
}

impl ExperimentReport {
    pub fn csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for row in &self.rows {
            w.serialize(row).map_err(|e| Error::parse("csv row", e.to_string()))?;
        }
        let bytes = w.into_inner().map_err(|e| Error::parse("csv", e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv is utf-8"))
    }

    pub fn summary_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}
