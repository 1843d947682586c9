//! Dyadic combinatorics behind the number `m # n`, the least `l` admitting a
//! nonsingular bilinear map `R^m x R^n -> R^l`.
//!
//! Everything here is exact integer arithmetic. The bound-propagation engine
//! lives in [`table`].

pub mod table;

pub use table::{BoundRule, HashBound, HashBoundsTable};

use crate::error::{Error, Result};

/// Number of ones in the binary expansion of `n`.
pub fn alpha(n: u64) -> Result<u32> {
    if n == 0 {
        return Err(Error::Domain("alpha(n) requires n >= 1".into()));
    }
    Ok(n.count_ones())
}

/// True iff `a` and `b` share no set bit.
pub fn bit_disjoint(a: u64, b: u64) -> bool {
    a & b == 0
}

/// Number of bit positions `j` where `k - h` has a zero and `k`, `h` differ.
pub fn tau(k: u64, h: u64) -> Result<u32> {
    if k <= h {
        return Err(Error::Domain(format!("tau(k, h) requires k > h, got ({k}, {h})")));
    }
    let diff = k - h;
    Ok((!diff & (k ^ h)).count_ones())
}

/// Hurwitz-Radon number: for `n = (2a+1) 2^(b+4c)` with `0 <= b < 4`,
/// returns `2^b + 8c`.
pub fn rho(n: u64) -> Result<u64> {
    if n == 0 {
        return Err(Error::Domain("rho(n) requires n >= 1".into()));
    }
    let e = u64::from(n.trailing_zeros());
    let (b, c) = (e % 4, e / 4);
    Ok((1 << b) + 8 * c)
}

/// Parity of `C(n, k)` by Lucas: odd iff `0 <= k <= n` and `k` is a bit-submask of `n`.
pub fn binomial_is_odd(n: u64, k: i64) -> bool {
    if k < 0 {
        return false;
    }
    let k = k as u64;
    k <= n && k & !n == 0
}

/// Stiefel-Hopf condition: `C(n, k)` is even for every integer `n - s < k < r`.
pub fn stiefel_hopf(r: u64, s: u64, n: u64) -> bool {
    let lo = n as i64 - s as i64 + 1;
    let hi = r as i64 - 1;
    (lo..=hi).all(|k| !binomial_is_odd(n, k))
}

/// `r o s` by scanning `n = max(r, s), ...`. The scan always stops by
/// `r + s - 1`, where the Stiefel-Hopf range is empty.
pub fn circ_direct(r: u64, s: u64) -> u64 {
    assert!(r >= 1 && s >= 1, "circ requires r, s >= 1");
    (r.max(s)..=r + s - 1)
        .find(|&n| stiefel_hopf(r, s, n))
        .expect("Stiefel-Hopf holds at n = r + s - 1")
}

/// `r o s` by the ceiling-halving recursion.
pub fn circ_recursive(r: u64, s: u64) -> u64 {
    assert!(r >= 1 && s >= 1, "circ requires r, s >= 1");
    if r == 1 || s == 1 {
        return r.max(s);
    }
    let (rh, sh) = (r.div_ceil(2), s.div_ceil(2));
    let half = circ_recursive(rh, sh);
    if r % 2 == 1 && s % 2 == 1 && half == rh + sh - 1 {
        2 * half - 1
    } else {
        2 * half
    }
}

/// `r o s = min { n | H(r, s, n) }`. Both evaluation routes are run and must agree.
pub fn circ(r: u64, s: u64) -> u64 {
    let direct = circ_direct(r, s);
    let recursive = circ_recursive(r, s);
    assert_eq!(direct, recursive, "circ({r},{s}): direct search and recursion disagree");
    direct
}

/// Residue weight `k(n)` used by Milgram's bound, defined on odd `n`.
pub(crate) fn milgram_k(n: u64) -> Option<u64> {
    match n % 8 {
        1 => Some(0),
        3 | 5 => Some(1),
        7 => Some(4),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tau_bit_scan(k: u64, h: u64) -> u32 {
        let bit = |x: u64, j: u32| (x >> j) & 1;
        (0..64)
            .filter(|&j| bit(k - h, j) == 0 && bit(k, j) != bit(h, j))
            .count() as u32
    }

    /// Parity of binomials from Pascal's triangle mod 2, no Lucas.
    fn pascal_parity(max_n: usize) -> Vec<Vec<bool>> {
        let mut rows: Vec<Vec<bool>> = vec![vec![true]];
        for n in 1..=max_n {
            let prev = &rows[n - 1];
            let mut row = vec![true; n + 1];
            for k in 1..n {
                row[k] = prev[k - 1] ^ prev[k];
            }
            rows.push(row);
        }
        rows
    }

    fn stiefel_hopf_oracle(tri: &[Vec<bool>], r: u64, s: u64, n: u64) -> bool {
        let lo = n as i64 - s as i64 + 1;
        (lo..r as i64).all(|k| {
            if k < 0 || k > n as i64 {
                true
            } else {
                !tri[n as usize][k as usize]
            }
        })
    }

    #[test]
    fn alpha_examples() {
        assert_eq!(alpha(1).unwrap(), 1);
        assert_eq!(alpha(5).unwrap(), 2);
        assert_eq!(alpha(255).unwrap(), 8);
        assert!(alpha(0).is_err());
        for k in 1..=30u32 {
            assert_eq!(alpha(1 << k).unwrap(), 1);
            assert_eq!(alpha((1 << k) - 1).unwrap(), k);
        }
    }

    #[test]
    fn bit_disjoint_examples() {
        assert!(bit_disjoint(2, 1));
        assert!(!bit_disjoint(2, 2));
        assert!(!bit_disjoint(3, 3));
    }

    #[test]
    fn tau_matches_bit_scan() {
        assert_eq!(tau(4, 2).unwrap(), 1);
        assert_eq!(tau(2, 1).unwrap(), 1);
        assert_eq!(tau(3, 1).unwrap(), 0);
        assert!(tau(2, 2).is_err());
        assert!(tau(1, 3).is_err());
        for k in 1..200 {
            for h in 0..k {
                assert_eq!(tau(k, h).unwrap(), tau_bit_scan(k, h));
                assert_eq!(tau(k, h).unwrap() == 0, bit_disjoint(h, k - h));
            }
        }
    }

    #[test]
    fn rho_examples() {
        let got: Vec<u64> = [1, 2, 4, 8, 16].iter().map(|&n| rho(n).unwrap()).collect();
        assert_eq!(got, vec![1, 2, 4, 8, 9]);
        assert_eq!(rho(3).unwrap(), 1);
        assert_eq!(rho(12).unwrap(), 4);
        assert_eq!(rho(32).unwrap(), 10);
        assert_eq!(rho(256).unwrap(), 17);
    }

    #[test]
    fn stiefel_hopf_examples() {
        assert!(stiefel_hopf(3, 3, 4));
        assert!(!stiefel_hopf(3, 3, 3));
        for n in 1..40 {
            assert!(stiefel_hopf(1, 1, n));
        }
    }

    #[test]
    fn stiefel_hopf_matches_pascal() {
        let tri = pascal_parity(140);
        for r in 1..=64u64 {
            for s in 1..=64u64 {
                for n in 1..=(r + s) {
                    assert_eq!(
                        stiefel_hopf(r, s, n),
                        stiefel_hopf_oracle(&tri, r, s, n),
                        "H({r},{s},{n})"
                    );
                }
            }
        }
    }

    #[test]
    fn circ_examples() {
        assert_eq!(circ(2, 2), 2);
        assert_eq!(circ(3, 3), 4);
        assert_eq!(circ(3, 5), 7);
        assert_eq!(circ(5, 5), 8);
        assert_eq!(circ(9, 9), 16);
        for s in 1..50 {
            assert_eq!(circ(1, s), s);
        }
    }

    #[test]
    fn circ_is_minimum_of_true_set() {
        for r in 1..=64u64 {
            for s in 1..=64u64 {
                let c = circ(r, s);
                assert!(r.max(s) <= c && c < r + s);
                assert!(stiefel_hopf(r, s, c));
                assert!((1..c).all(|n| !stiefel_hopf(r, s, n)));
                assert!(stiefel_hopf(r, s, r + s - 1));
            }
        }
    }

    #[test]
    fn circ_bit_disjoint_gives_maximum() {
        for r in 1..=40u64 {
            for s in 1..=40u64 {
                if bit_disjoint(r - 1, s - 1) {
                    assert_eq!(circ(r, s), r + s - 1);
                }
            }
        }
    }
}
