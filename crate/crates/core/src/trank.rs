//! Typical ranks of `R^{m x n x p}` as a total function of the shape.
//!
//! The shape is sorted so that `m <= n <= p`. Regimes are tried in a fixed
//! order: one slice, two slices, `p > (m-1)n`, the window
//! `(m-1)(n-1)+2 <= p <= (m-1)n` (decided by `m # n`), the boundary
//! `p = (m-1)(n-1)+1`, and finally shapes below the boundary.

use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::hopf::{bit_disjoint, HashBound, HashBoundsTable};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum TrankKind {
    Exact { ranks: Vec<usize> },
    /// `if_holds` when `m # n <= threshold`, `otherwise` when `m # n > threshold`;
    /// the table only brackets `m # n`, so both remain possible.
    Conditional {
        if_holds: Vec<usize>,
        otherwise: Vec<usize>,
        threshold: usize,
    },
    /// Typical ranks lie in `[lower, upper]`; `upper = None` means unknown.
    Interval { lower: usize, upper: Option<usize> },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TrankResult {
    /// Sorted shape used for the classification.
    pub shape: [usize; 3],
    pub kind: TrankKind,
    pub provenance: &'static str,
    /// Bounds on `m # n` that were consulted, if any.
    pub hash_bound: Option<HashBound>,
}

impl TrankResult {
    pub fn exact(&self) -> Option<&[usize]> {
        match &self.kind {
            TrankKind::Exact { ranks } => Some(ranks),
            _ => None,
        }
    }

    pub fn is_plural(&self) -> Option<bool> {
        self.exact().map(|r| r.len() > 1)
    }
}

fn set(ranks: &[usize]) -> String {
    let inner: Vec<String> = ranks.iter().map(usize::to_string).collect();
    format!("{{{}}}", inner.join(", "))
}

impl fmt::Display for TrankKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TrankKind::Exact { ranks } => f.write_str(&set(ranks)),
            TrankKind::Conditional {
                if_holds,
                otherwise,
                threshold,
            } => write!(f, "{} if m#n <= {threshold}, else {}", set(if_holds), set(otherwise)),
            TrankKind::Interval { lower, upper: Some(u) } => {
                write!(f, "between {} and {} (undetermined)", set(&[*lower]), set(&(*lower..=*u).collect::<Vec<_>>()))
            }
            TrankKind::Interval { lower, upper: None } => write!(f, "min >= {lower}, max unknown"),
        }
    }
}

impl fmt::Display for TrankResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ({})", self.kind, self.provenance)
    }
}

fn exact(shape: [usize; 3], ranks: Vec<usize>, provenance: &'static str, hb: Option<HashBound>) -> TrankResult {
    TrankResult {
        shape,
        kind: TrankKind::Exact { ranks },
        provenance,
        hash_bound: hb,
    }
}

/// Classifies `R^{m x n x p}`; the order of the arguments does not matter.
pub fn classify(m: usize, n: usize, p: usize, bounds: &HashBoundsTable) -> Result<TrankResult> {
    if m == 0 || n == 0 || p == 0 {
        return Err(Error::Domain(format!("dimensions must be positive, got ({m}, {n}, {p})")));
    }
    let mut s = [m, n, p];
    s.sort_unstable();
    let [m, n, p] = s;

    if m == 1 {
        return Ok(exact(s, vec![n], "matrix rank", None));
    }
    if m == 2 {
        let ranks = if n == p { vec![n, n + 1] } else { vec![p.min(2 * n)] };
        return Ok(exact(s, ranks, "two-slice pencils", None));
    }
    if p > (m - 1) * n {
        return Ok(exact(s, vec![p.min(m * n)], "min{p, mn} for p > (m-1)n", None));
    }

    let p0 = (m - 1) * (n - 1) + 1;
    if p > p0 {
        let u = m * n - p;
        let hb = bounds.bounds(m, n);
        let kind = if hb.upper <= u {
            TrankKind::Exact { ranks: vec![p, p + 1] }
        } else if hb.lower > u {
            TrankKind::Exact { ranks: vec![p] }
        } else {
            TrankKind::Conditional {
                if_holds: vec![p, p + 1],
                otherwise: vec![p],
                threshold: u,
            }
        };
        return Ok(TrankResult {
            shape: s,
            kind,
            provenance: "Theorem 1.2",
            hash_bound: Some(hb),
        });
    }

    let disjoint = bit_disjoint((m - 1) as u64, (n - 1) as u64);
    if p == p0 {
        if !disjoint {
            return Ok(exact(s, vec![p, p + 1], "Theorem 1.3 + Theorem 8.1", None));
        }
        return Ok(TrankResult {
            shape: s,
            kind: TrankKind::Interval {
                lower: p,
                upper: Some(p + 1),
            },
            provenance: "open: bit-disjoint boundary case",
            hash_bound: None,
        });
    }

    let k = p0 - 1 - p;
    if disjoint && k * (m + n - 1) < (m - 1) * (n - 1) {
        return Ok(exact(s, vec![p0], "Proposition 8.8", None));
    }
    let generic = (m * n * p).div_ceil(m + n + p - 2);
    Ok(TrankResult {
        shape: s,
        kind: TrankKind::Interval {
            lower: generic.max(p),
            upper: None,
        },
        provenance: "generic rank lower bound",
        hash_bound: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table() -> HashBoundsTable {
        HashBoundsTable::build(16).unwrap()
    }

    #[test]
    fn small_cases() {
        let t = table();
        assert_eq!(classify(1, 4, 6, &t).unwrap().exact(), Some(&[4][..]));
        assert_eq!(classify(2, 3, 3, &t).unwrap().exact(), Some(&[3, 4][..]));
        assert_eq!(classify(2, 3, 5, &t).unwrap().exact(), Some(&[5][..]));
        assert_eq!(classify(2, 3, 9, &t).unwrap().exact(), Some(&[6][..]));
        assert_eq!(classify(3, 3, 10, &t).unwrap().exact(), Some(&[9][..]));
        assert!(classify(0, 3, 3, &t).is_err());
    }

    #[test]
    fn boundary_bit_disjoint_is_open() {
        // 3 - 1 = 2 and 4 - 1 = 3 share a bit; 3 - 1 = 2 and 5 - 1 = 4 do not.
        let t = table();
        assert_eq!(classify(3, 4, 7, &t).unwrap().exact(), Some(&[7, 8][..]));
        let r = classify(3, 5, 9, &t).unwrap();
        assert_eq!(r.kind, TrankKind::Interval { lower: 9, upper: Some(10) });
    }

    #[test]
    fn below_boundary() {
        let t = table();
        // m = 3, n = 5: (m-1)(n-1) = 8, m + n - 1 = 7, so k = 0 and k = 1 qualify.
        assert_eq!(classify(3, 5, 8, &t).unwrap().exact(), Some(&[9][..]));
        assert_eq!(classify(3, 5, 7, &t).unwrap().exact(), Some(&[9][..]));
        let r = classify(3, 5, 6, &t).unwrap();
        assert!(matches!(r.kind, TrankKind::Interval { upper: None, .. }));
        // Not bit-disjoint: no downward propagation.
        let r = classify(3, 3, 4, &t).unwrap();
        assert_eq!(r.kind, TrankKind::Interval { lower: 5, upper: None });
    }

    #[test]
    fn conditional_when_table_straddles() {
        // A table too small to cover (20, 20) falls back to standalone bounds.
        let t = HashBoundsTable::build(4).unwrap();
        let hb = t.bounds(20, 20);
        assert!(hb.lower < hb.upper);
        let u = (hb.lower + hb.upper) / 2;
        let r = classify(20, 20, 400 - u, &t).unwrap();
        assert!(matches!(r.kind, TrankKind::Conditional { .. }), "{r}");
        // Pinned by the full table, it collapses.
        let full = HashBoundsTable::build(20).unwrap();
        assert!(classify(20, 20, 400 - u, &full).unwrap().exact().is_some());
    }

    #[test]
    fn display() {
        let t = table();
        assert_eq!(classify(3, 3, 5, &t).unwrap().to_string(), "{5, 6} (Theorem 1.3 + Theorem 8.1)");
        assert!(classify(3, 3, 7, &t).unwrap().to_string().starts_with("{7}"));
    }
}
