//! Exact rational arithmetic helpers shared by the geometry and counting
//! kernels: `p/q` string parsing, base-`q` denominator analysis, floor
//! division, and small dense linear algebra over the rationals.

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

/// Parses `"p/q"` or a bare integer `"p"` into an exact rational.
pub fn parse_rational(s: &str) -> Result<BigRational> {
    let s = s.trim();
    let (num, den) = match s.split_once('/') {
        Some((n, d)) => (n.trim(), Some(d.trim())),
        None => (s, None),
    };
    let n: BigInt = num
        .parse()
        .map_err(|_| Error::Parse(format!("bad rational {s:?}")))?;
    let d: BigInt = match den {
        Some(d) => d
            .parse()
            .map_err(|_| Error::Parse(format!("bad rational {s:?}")))?,
        None => BigInt::one(),
    };
    if d.is_zero() {
        return Err(Error::Parse(format!("zero denominator in {s:?}")));
    }
    Ok(BigRational::new(n, d))
}

/// Renders a rational as `p/q`, or just `p` when the denominator is 1.
pub fn format_rational(r: &BigRational) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

pub fn rational_to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

/// Smallest `t <= max_t` with `den | q^t`, if any.
pub fn min_power_dividing(q: u32, den: &BigInt, max_t: u32) -> Option<u32> {
    let q = BigInt::from(q);
    let mut pow = BigInt::one();
    for t in 0..=max_t {
        if (&pow % den).is_zero() {
            return Some(t);
        }
        pow *= &q;
    }
    None
}

/// Exact `floor(r)` as a big integer.
pub fn rational_floor(r: &BigRational) -> BigInt {
    r.numer().div_floor(r.denom())
}

/// `q^e` as an unsigned big integer.
pub fn upow(q: u32, e: u64) -> BigUint {
    BigUint::from(q).pow(u32::try_from(e).expect("exponent fits u32"))
}

/// If `n` is an exact power of `q`, returns the exponent.
pub fn integer_log(q: u32, n: &BigUint) -> Option<u64> {
    if n.is_zero() || q < 2 {
        return None;
    }
    let q = BigUint::from(q);
    let mut n = n.clone();
    let mut e = 0u64;
    while n > BigUint::one() {
        let (quot, rem) = n.div_rem(&q);
        if !rem.is_zero() {
            return None;
        }
        n = quot;
        e += 1;
    }
    Some(e)
}

/// Natural log of a big integer, stable for values far beyond `f64` range.
pub fn big_ln(n: &BigUint) -> f64 {
    let bits = n.bits();
    if bits <= 52 {
        return n.to_f64().unwrap().ln();
    }
    let shift = bits - 52;
    let top = (n >> shift).to_f64().unwrap();
    top.ln() + shift as f64 * std::f64::consts::LN_2
}

/// Rank of a rational matrix (rows of equal length), by fraction-free
/// Gaussian elimination.
pub fn rational_rank(rows: &[Vec<BigRational>]) -> usize {
    let mut m: Vec<Vec<BigRational>> = rows.to_vec();
    let nrows = m.len();
    let ncols = if nrows == 0 { 0 } else { m[0].len() };
    let mut rank = 0;
    let mut col = 0;
    while rank < nrows && col < ncols {
        let pivot = (rank..nrows).find(|&r| !m[r][col].is_zero());
        let Some(p) = pivot else {
            col += 1;
            continue;
        };
        m.swap(rank, p);
        let inv = m[rank][col].clone();
        for r in rank + 1..nrows {
            if m[r][col].is_zero() {
                continue;
            }
            let factor = &m[r][col] / &inv;
            for c in col..ncols {
                let sub = &factor * &m[rank][c];
                m[r][c] -= sub;
            }
        }
        rank += 1;
        col += 1;
    }
    rank
}

/// Solves the square rational system `a x = b` by Gaussian elimination with
/// exact pivoting. Returns `None` when `a` is singular.
pub fn rational_solve(a: &[Vec<BigRational>], b: &[BigRational]) -> Option<Vec<BigRational>> {
    let n = a.len();
    assert!(a.iter().all(|row| row.len() == n) && b.len() == n);
    let mut m: Vec<Vec<BigRational>> = a
        .iter()
        .zip(b)
        .map(|(row, rhs)| {
            let mut r = row.clone();
            r.push(rhs.clone());
            r
        })
        .collect();
    for col in 0..n {
        let pivot = (col..n).find(|&r| !m[r][col].is_zero())?;
        m.swap(col, pivot);
        let inv = m[col][col].clone();
        for r in 0..n {
            if r == col || m[r][col].is_zero() {
                continue;
            }
            let factor = &m[r][col] / &inv;
            for c in col..=n {
                let sub = &factor * &m[col][c];
                m[r][c] -= sub;
            }
        }
    }
    Some(
        (0..n)
            .map(|r| &m[r][n] / &m[r][r])
            .collect::<Vec<BigRational>>(),
    )
}

/// Dot product of rational vectors.
pub fn rational_dot(x: &[BigRational], y: &[BigRational]) -> BigRational {
    debug_assert_eq!(x.len(), y.len());
    x.iter()
        .zip(y)
        .fold(BigRational::zero(), |acc, (a, b)| acc + a * b)
}

pub fn rational_abs(r: &BigRational) -> BigRational {
    if r.is_negative() {
        -r.clone()
    } else {
        r.clone()
    }
}
