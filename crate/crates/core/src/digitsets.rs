//! Digit-block fractal construction.
//!
//! A `BlockSchedule` is a finite list of disjoint integer intervals
//! `[m_k, M_k]` with `M_k - m_k >= 2^k`, plus a target limsup density. The
//! associated one-dimensional set consists of numbers whose base-`q` digits
//! are free on scheduled levels and zero elsewhere; products of `d` copies
//! give the ambient test sets. Covering numbers of these sets at the q-adic
//! scales are exact: `q^(c * #active levels)`.

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::Zero;

use crate::covering::{CoveringProfile, PointCloud, ProfileEntry, Provenance, ScaleValue};
use crate::detrand::CounterRng;
use crate::error::{Error, Result};
use crate::exact::upow;

/// Default ceiling on explicit enumeration.
pub const ENUMERATION_CAP: u64 = 10_000_000;

// ---------------------------------------------------------------------------
// Block schedules
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq)]
pub struct BlockSchedule {
    blocks: Vec<(u64, u64)>,
    target_density: f64,
    base: u32,
}

impl BlockSchedule {
    pub fn new(blocks: Vec<(u64, u64)>, target_density: f64, base: u32) -> Result<Self> {
        if base < 2 {
            return Err(Error::InvalidSchedule(format!("base {base} < 2")));
        }
        if !(0.0..=1.0).contains(&target_density) {
            return Err(Error::InvalidSchedule(format!(
                "density {target_density} outside [0, 1]"
            )));
        }
        if blocks.is_empty() {
            return Err(Error::InvalidSchedule("no blocks".into()));
        }
        let mut prev_end = 0u64;
        for (k, &(m, big_m)) in blocks.iter().enumerate() {
            let k1 = k as u64 + 1;
            if m < 1 || big_m < m {
                return Err(Error::InvalidSchedule(format!(
                    "block {k1}: [{m}, {big_m}] malformed"
                )));
            }
            if m <= prev_end {
                return Err(Error::InvalidSchedule(format!(
                    "block {k1} starts at {m}, not after previous end {prev_end}"
                )));
            }
            let growth = 1u64
                .checked_shl(k1 as u32)
                .ok_or_else(|| Error::InvalidSchedule("block index too large".into()))?;
            if big_m - m < growth {
                return Err(Error::InvalidSchedule(format!(
                    "block {k1} has length {} < 2^{k1}",
                    big_m - m
                )));
            }
            prev_end = big_m;
        }
        Ok(Self {
            blocks,
            target_density,
            base,
        })
    }

    /// Builds `count` blocks of minimal growth (`M_k - m_k = 2^k` exactly)
    /// with gaps placed so that the active density at the checkpoints
    /// `N = M_k` approaches `rho` from below.
    pub fn for_density(rho: f64, count: usize, base: u32) -> Result<Self> {
        if !(0.0..=1.0).contains(&rho) {
            return Err(Error::InvalidSchedule(format!("density {rho} outside [0, 1]")));
        }
        if count == 0 || count > 40 {
            return Err(Error::InvalidSchedule(format!(
                "block count {count} outside 1..=40"
            )));
        }
        let mut blocks = Vec::with_capacity(count);
        if rho == 0.0 {
            // super-exponential gaps: the k-th gap is k * 2^(k+3)
            let mut prev_end = 0u64;
            for k in 1..=count as u64 {
                let gap = k * (1u64 << (k + 3));
                let m = prev_end + gap + 1;
                let big_m = m + (1u64 << k);
                blocks.push((m, big_m));
                prev_end = big_m;
            }
        } else {
            let mut active = 0u64;
            let mut prev_end = 0u64;
            for k in 1..=count as u64 {
                let len = 1u64 << k;
                active += len + 1;
                let ideal = (active as f64 / rho).ceil() as u64;
                let big_m = ideal.max(prev_end + len + 1);
                blocks.push((big_m - len, big_m));
                prev_end = big_m;
            }
        }
        let schedule = Self::new(blocks, rho, base)?;
        debug_assert!({
            let err = (schedule.density_f64(schedule.checkpoints().last().copied().unwrap())
                - rho)
                .abs();
            err <= 2.0 / count as f64
        });
        Ok(schedule)
    }

    pub fn blocks(&self) -> &[(u64, u64)] {
        &self.blocks
    }

    pub fn base(&self) -> u32 {
        self.base
    }

    pub fn target_density(&self) -> f64 {
        self.target_density
    }

    /// Checkpoint levels `M_k` where the density limsup is witnessed.
    pub fn checkpoints(&self) -> Vec<u64> {
        self.blocks.iter().map(|&(_, m)| m).collect()
    }

    pub fn contains_level(&self, level: u64) -> bool {
        self.blocks.iter().any(|&(m, big_m)| level >= m && level <= big_m)
    }

    /// Number of scheduled levels in `[1, n]`.
    pub fn active_count(&self, n: u64) -> u64 {
        self.blocks
            .iter()
            .map(|&(m, big_m)| {
                if n < m {
                    0
                } else {
                    n.min(big_m) - m + 1
                }
            })
            .sum()
    }

    /// Exact density of scheduled levels in `[1, n]`.
    pub fn density_profile(&self, n: u64) -> Result<BigRational> {
        if n < 1 {
            return Err(Error::Domain("density checkpoint must be >= 1".into()));
        }
        Ok(BigRational::new(
            BigInt::from(self.active_count(n)),
            BigInt::from(n),
        ))
    }

    pub fn density_f64(&self, n: u64) -> f64 {
        self.active_count(n) as f64 / n as f64
    }

    /// Text serialization: one `k m_k M_k` line per block.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (k, &(m, big_m)) in self.blocks.iter().enumerate() {
            out.push_str(&format!("{} {} {}\n", k + 1, m, big_m));
        }
        out
    }

    /// Parses the `k m_k M_k` format; density and base are supplied by the
    /// caller (they are echoed in file headers, not in the block lines).
    pub fn from_text(text: &str, target_density: f64, base: u32) -> Result<Self> {
        let mut blocks = Vec::new();
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 3 {
                return Err(Error::Parse(format!("bad schedule line {line:?}")));
            }
            let k: usize = fields[0]
                .parse()
                .map_err(|_| Error::Parse(format!("bad block index {:?}", fields[0])))?;
            if k != blocks.len() + 1 {
                return Err(Error::Parse(format!(
                    "block index {k} out of order (expected {})",
                    blocks.len() + 1
                )));
            }
            let m: u64 = fields[1]
                .parse()
                .map_err(|_| Error::Parse(format!("bad m_k {:?}", fields[1])))?;
            let big_m: u64 = fields[2]
                .parse()
                .map_err(|_| Error::Parse(format!("bad M_k {:?}", fields[2])))?;
            blocks.push((m, big_m));
        }
        Self::new(blocks, target_density, base)
    }
}

// ---------------------------------------------------------------------------
// Digit fractals
// ---------------------------------------------------------------------------

/// Truncation of the scheduled digit set: digits beyond `depth` are dropped,
/// which moves every point by less than `q^(1-depth)`.
#[derive(Clone, Debug)]
pub struct DigitFractal {
    schedule: BlockSchedule,
    depth: u64,
    ambient_dim: usize,
}

impl DigitFractal {
    pub fn new(schedule: BlockSchedule, depth: u64, ambient_dim: usize) -> Result<Self> {
        if depth < 1 {
            return Err(Error::Domain("depth must be >= 1".into()));
        }
        if ambient_dim < 1 {
            return Err(Error::Domain("ambient dimension must be >= 1".into()));
        }
        Ok(Self {
            schedule,
            depth,
            ambient_dim,
        })
    }

    pub fn schedule(&self) -> &BlockSchedule {
        &self.schedule
    }

    pub fn depth(&self) -> u64 {
        self.depth
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    pub fn base(&self) -> u32 {
        self.schedule.base()
    }

    /// Scheduled levels within the truncation depth, ascending.
    pub fn active_levels(&self) -> Vec<u64> {
        (1..=self.depth)
            .filter(|&m| self.schedule.contains_level(m))
            .collect()
    }

    /// `c * #(A n [1, m])`: the base-q exponent of the covering count.
    pub fn covering_exponent(&self, m: u64) -> Result<u64> {
        if m < 1 || m > self.depth {
            return Err(Error::LevelOutOfRange {
                level: m,
                depth: self.depth,
            });
        }
        Ok(self.ambient_dim as u64 * self.schedule.active_count(m))
    }

    /// Exact number of nonempty q-adic cells of side `q^{-m}`.
    pub fn exact_covering_count(&self, m: u64) -> Result<BigUint> {
        Ok(BigUint::from(self.base()).pow(
            u32::try_from(self.covering_exponent(m)?)
                .map_err(|_| Error::Domain("covering exponent exceeds u32".into()))?,
        ))
    }

    /// Total number of distinct truncated points.
    pub fn point_count(&self) -> BigUint {
        self.exact_covering_count(self.depth)
            .expect("depth is in range")
    }

    /// Exact covering profile at the given q-adic levels.
    pub fn exact_profile(&self, levels: &[u64]) -> Result<CoveringProfile> {
        let mut levels: Vec<u64> = levels.to_vec();
        levels.sort_unstable();
        levels.dedup();
        let entries = levels
            .iter()
            .map(|&m| {
                Ok(ProfileEntry {
                    scale: ScaleValue::q_pow(self.base(), m),
                    count: self.exact_covering_count(m)?,
                    provenance: Provenance::Exact,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let mut p = CoveringProfile::new(entries)?;
        p.ambient_dim = Some(self.ambient_dim);
        Ok(p)
    }

    /// All truncated points, exact, with shared denominator `q^depth`.
    /// Coordinates are ordered lexicographically by digit string.
    pub fn enumerate_points(&self, cap: u64) -> Result<PointCloud> {
        let total = self.point_count();
        if total > BigUint::from(cap) {
            return Err(Error::EnumerationCap {
                points: total.to_string(),
                cap,
            });
        }
        let line = self.enumerate_line_numerators();
        let n_line = line.len();
        let d = self.ambient_dim;
        let total = n_line.pow(d as u32);
        let mut coords = Vec::with_capacity(total * d);
        let mut index = vec![0usize; d];
        for _ in 0..total {
            for &i in &index {
                coords.push(line[i].clone());
            }
            for c in (0..d).rev() {
                index[c] += 1;
                if index[c] < n_line {
                    break;
                }
                index[c] = 0;
            }
        }
        PointCloud::from_numerators(d, BigInt::from(upow(self.base(), self.depth)), coords)
    }

    /// Numerators (over `q^depth`) of the one-dimensional digit set, in
    /// digit-lexicographic order.
    fn enumerate_line_numerators(&self) -> Vec<BigInt> {
        let q = self.base() as u64;
        let levels = self.active_levels();
        let mut values = vec![BigInt::zero()];
        for &m in &levels {
            let place = BigInt::from(upow(self.base(), self.depth - m));
            let mut next = Vec::with_capacity(values.len() * q as usize);
            for v in &values {
                for digit in 0..q {
                    next.push(v + &place * BigInt::from(digit));
                }
            }
            values = next;
        }
        values
    }

    /// `n` points drawn digit-by-digit from the counter generator keyed by
    /// `seed`; reproducible bit-for-bit.
    pub fn sample_points(&self, n: u64, seed: u64) -> Result<PointCloud> {
        if n == 0 {
            return Err(Error::Domain("sample count must be >= 1".into()));
        }
        let rng = CounterRng::new(seed).stream(0x5A);
        let q = self.base() as u64;
        let levels = self.active_levels();
        let d = self.ambient_dim;
        let places: Vec<BigInt> = levels
            .iter()
            .map(|&m| BigInt::from(upow(self.base(), self.depth - m)))
            .collect();
        let mut coords = Vec::with_capacity((n as usize) * d);
        let mut counter = 0u64;
        for _ in 0..n {
            for _ in 0..d {
                let mut v = BigInt::zero();
                for place in &places {
                    let digit = rng.below_at(counter, q);
                    counter += 1;
                    if digit != 0 {
                        v += place * BigInt::from(digit);
                    }
                }
                coords.push(v);
            }
        }
        PointCloud::from_numerators(d, BigInt::from(upow(self.base(), self.depth)), coords)
    }

    /// Base-q digit string (levels `1..=depth`) of one coordinate value given
    /// as a numerator over `q^depth`.
    pub fn digits_of_numerator(&self, numerator: &BigInt) -> Vec<u32> {
        let q = BigInt::from(self.base());
        let mut digits = vec![0u32; self.depth as usize];
        let mut v = numerator.clone();
        for m in (1..=self.depth).rev() {
            let (quot, rem) = num_integer::Integer::div_rem(&v, &q);
            let r: BigInt = rem;
            digits[m as usize - 1] = u32::try_from(r).expect("digit in range");
            v = quot;
        }
        digits
    }
}
