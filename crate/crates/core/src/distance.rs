//! Distance sets and the digit envelope.
//!
//! Distances of exact clouds under polyhedral norms are exact rationals; for
//! digit sets with a base-q rational norm their base-q digit support is
//! confined to a bounded enlargement of the schedule blocks. The enlargement
//! (the envelope) is certified rather than trusted: `verify_envelope` decides
//! exactly, per value, whether a signed-digit representation supported inside
//! the envelope exists.

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use rayon::prelude::*;
use serde::Serialize;

use crate::covering::{CloudData, PointCloud};
use crate::detrand::CounterRng;
use crate::digitsets::BlockSchedule;
use crate::error::{Error, Result};
use crate::exact::{format_rational, min_power_dividing, upow};
use crate::norms::{NormSpec, PolyhedralNorm};

/// Full pairwise generation is reserved for clouds below this many pairs.
pub const PAIR_CAP: u64 = 100_000_000;

/// Largest facet-denominator power `t` accepted when matching a norm to a
/// base: `den | q^t`.
pub const MAX_DENOM_POWER: u32 = 4;

// ---------------------------------------------------------------------------
// Distance clouds
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize)]
pub enum DistanceSource {
    FullPairs { include_self: bool },
    Pinned { pin: Vec<String> },
    SampledPairs { count: u64, seed: u64 },
}

/// One-dimensional cloud of `||x - y||` values, sorted ascending.
#[derive(Clone, Debug)]
pub struct DistanceCloud {
    values: PointCloud,
    source: DistanceSource,
}

impl DistanceCloud {
    pub fn values(&self) -> &PointCloud {
        &self.values
    }

    pub fn source(&self) -> &DistanceSource {
        &self.source
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_exact(&self) -> bool {
        self.values.is_exact()
    }

    pub fn value_f64(&self, i: usize) -> f64 {
        self.values.point_f64(i)[0]
    }

    pub fn value_rational(&self, i: usize) -> Option<BigRational> {
        self.values.point_rational(i).map(|mut v| v.pop().unwrap())
    }

    pub fn to_csv(&self, exact: bool, precision: usize) -> String {
        self.values.to_csv(exact, precision)
    }
}

#[derive(Clone, Copy, Debug)]
pub struct PairOptions {
    /// Include the zero distances of coincident pair indices.
    pub include_self: bool,
    pub pair_cap: u64,
    /// Deterministic pair sampling `(count, seed)` instead of all pairs.
    pub sample: Option<(u64, u64)>,
}

impl Default for PairOptions {
    fn default() -> Self {
        Self {
            include_self: false,
            pair_cap: PAIR_CAP,
            sample: None,
        }
    }
}

fn pair_at(n: u64, rng: &CounterRng, k: u64) -> (usize, usize) {
    let i = rng.below_at(2 * k, n) as usize;
    let mut j = rng.below_at(2 * k + 1, n) as usize;
    if i == j {
        j = (j + 1 + (rng.u64_at(3 * k + 1) % (n - 1)) as usize) % n as usize;
    }
    (i, j)
}

/// All pairwise distances of `cloud` under `norm`; exact rationals when the
/// cloud is exact and the norm polyhedral, floats otherwise.
pub fn distance_set(cloud: &PointCloud, norm: &NormSpec, opts: &PairOptions) -> Result<DistanceCloud> {
    if cloud.is_empty() {
        return Err(Error::EmptyCloud);
    }
    if cloud.dim() != norm.dim() {
        return Err(Error::DimensionMismatch {
            expected: norm.dim(),
            got: cloud.dim(),
        });
    }
    let n = cloud.len() as u64;
    let full_pairs = n * n.saturating_sub(1) / 2 + if opts.include_self { n } else { 0 };
    let pairs: Vec<(usize, usize)> = match opts.sample {
        None => {
            if full_pairs > opts.pair_cap {
                return Err(Error::PairCap {
                    pairs: full_pairs.to_string(),
                    cap: opts.pair_cap,
                });
            }
            let mut v = Vec::with_capacity(full_pairs as usize);
            for i in 0..n as usize {
                if opts.include_self {
                    v.push((i, i));
                }
                for j in i + 1..n as usize {
                    v.push((i, j));
                }
            }
            v
        }
        Some((count, seed)) => {
            if n < 2 {
                return Err(Error::Domain("sampling needs at least 2 points".into()));
            }
            let rng = CounterRng::new(seed).stream(0xD1);
            (0..count).map(|k| pair_at(n, &rng, k)).collect()
        }
    };
    let source = match opts.sample {
        None => DistanceSource::FullPairs {
            include_self: opts.include_self,
        },
        Some((count, seed)) => DistanceSource::SampledPairs { count, seed },
    };
    build_distance_cloud(cloud, norm, &pairs, source)
}

/// Distances from every cloud point to a fixed pin.
pub fn pinned_distance_set(
    cloud: &PointCloud,
    norm: &NormSpec,
    pin: &[BigRational],
) -> Result<DistanceCloud> {
    if cloud.is_empty() {
        return Err(Error::EmptyCloud);
    }
    if cloud.dim() != norm.dim() || pin.len() != norm.dim() {
        return Err(Error::DimensionMismatch {
            expected: norm.dim(),
            got: pin.len(),
        });
    }
    let source = DistanceSource::Pinned {
        pin: pin.iter().map(format_rational).collect(),
    };
    match (cloud.data(), norm) {
        (CloudData::Exact { denom, coords }, NormSpec::Polyhedral(poly)) => {
            let mut shared = denom.clone();
            for c in pin {
                shared = shared.lcm(c.denom());
            }
            let cloud_scale = &shared / denom;
            let pin_num: Vec<BigInt> = pin
                .iter()
                .map(|c| c.numer() * (&shared / c.denom()))
                .collect();
            let facets = integer_facets(poly);
            let dim = cloud.dim();
            let mut nums: Vec<BigInt> = coords
                .par_chunks(dim)
                .map(|row| {
                    let diff: Vec<BigInt> = row
                        .iter()
                        .zip(&pin_num)
                        .map(|(a, p)| a * &cloud_scale - p)
                        .collect();
                    max_abs_dot(&diff, &facets)
                })
                .collect();
            nums.par_sort_unstable();
            let den = shared * poly.common_denominator();
            Ok(DistanceCloud {
                values: PointCloud::from_numerators(1, den, nums)?,
                source,
            })
        }
        _ => {
            let pinf: Vec<f64> = pin.iter().map(crate::exact::rational_to_f64).collect();
            let n = cloud.len();
            let mut vals: Vec<f64> = (0..n)
                .into_par_iter()
                .map(|i| {
                    let x = cloud.point_f64(i);
                    let diff: Vec<f64> = x.iter().zip(&pinf).map(|(a, b)| a - b).collect();
                    norm.eval_f64(&diff).expect("dims checked")
                })
                .collect();
            vals.par_sort_unstable_by(f64::total_cmp);
            Ok(DistanceCloud {
                values: PointCloud::from_f64(1, vals)?,
                source,
            })
        }
    }
}

fn build_distance_cloud(
    cloud: &PointCloud,
    norm: &NormSpec,
    pairs: &[(usize, usize)],
    source: DistanceSource,
) -> Result<DistanceCloud> {
    match (cloud.data(), norm) {
        (CloudData::Exact { denom, coords }, NormSpec::Polyhedral(poly)) => {
            let facets = integer_facets(poly);
            let dim = cloud.dim();
            let mut nums: Vec<BigInt> = pairs
                .par_iter()
                .map(|&(a, b)| {
                    let ra = &coords[a * dim..(a + 1) * dim];
                    let rb = &coords[b * dim..(b + 1) * dim];
                    let diff: Vec<BigInt> = ra.iter().zip(rb).map(|(x, y)| x - y).collect();
                    max_abs_dot(&diff, &facets)
                })
                .collect();
            nums.par_sort_unstable();
            let den = denom * poly.common_denominator();
            Ok(DistanceCloud {
                values: PointCloud::from_numerators(1, den, nums)?,
                source,
            })
        }
        _ => {
            let mut vals: Vec<f64> = pairs
                .par_iter()
                .map(|&(a, b)| {
                    let xa = cloud.point_f64(a);
                    let xb = cloud.point_f64(b);
                    let diff: Vec<f64> = xa.iter().zip(&xb).map(|(x, y)| x - y).collect();
                    norm.eval_f64(&diff).expect("dims checked")
                })
                .collect();
            vals.par_sort_unstable_by(f64::total_cmp);
            Ok(DistanceCloud {
                values: PointCloud::from_f64(1, vals)?,
                source,
            })
        }
    }
}

/// Facet entries scaled to integers over the norm's common denominator.
fn integer_facets(poly: &PolyhedralNorm) -> Vec<Vec<BigInt>> {
    let den = poly.common_denominator();
    poly.facets()
        .iter()
        .map(|f| f.iter().map(|e| e.numer() * (den / e.denom())).collect())
        .collect()
}

fn max_abs_dot(diff: &[BigInt], facets: &[Vec<BigInt>]) -> BigInt {
    let mut best = BigInt::zero();
    for f in facets {
        let mut dot = BigInt::zero();
        for (d, c) in diff.iter().zip(f) {
            if !c.is_zero() {
                dot += d * c;
            }
        }
        let a = dot.abs();
        if a > best {
            best = a;
        }
    }
    best
}

// ---------------------------------------------------------------------------
// Digit envelope
// ---------------------------------------------------------------------------

/// Schedule blocks enlarged by `pad` at the top end: the candidate support
/// for the base-q digits of distance values. Overlapping enlarged blocks are
/// merged.
#[derive(Clone, Debug, Serialize)]
pub struct DigitEnvelope {
    blocks: Vec<(u64, u64)>,
    pad: u64,
}

impl DigitEnvelope {
    pub fn blocks(&self) -> &[(u64, u64)] {
        &self.blocks
    }

    pub fn pad(&self) -> u64 {
        self.pad
    }

    pub fn contains_level(&self, level: u64) -> bool {
        self.blocks.iter().any(|&(a, b)| level >= a && level <= b)
    }

    pub fn active_count(&self, n: u64) -> u64 {
        self.blocks
            .iter()
            .map(|&(a, b)| if n < a { 0 } else { n.min(b) - a + 1 })
            .sum()
    }

    /// Density of envelope levels in `[1, n]`: the analytic upper bracket for
    /// the distance-set slope at checkpoint `n`.
    pub fn density_f64(&self, n: u64) -> f64 {
        self.active_count(n) as f64 / n as f64
    }
}

/// Builds the envelope for distances of the `d`-fold product of the
/// scheduled digit set under a rational polyhedral norm.
///
/// The facet denominator must divide `q^t` for some `t <= MAX_DENOM_POWER`;
/// the pad is `2 + ceil(log_q d) + max(1, t)`, covering digit carries of the
/// coefficient sums plus the `t`-level shift of the facet scaling. The pad is
/// a candidate, not a trusted bound: `verify_envelope` certifies it.
pub fn digit_envelope(
    schedule: &BlockSchedule,
    q: u32,
    d: usize,
    norm: &PolyhedralNorm,
) -> Result<DigitEnvelope> {
    if q != schedule.base() {
        return Err(Error::Domain(format!(
            "base {q} does not match the schedule base {}",
            schedule.base()
        )));
    }
    if d < 1 {
        return Err(Error::Domain("ambient dimension must be >= 1".into()));
    }
    let t = min_power_dividing(q, norm.common_denominator(), MAX_DENOM_POWER).ok_or_else(|| {
        Error::DenominatorMismatch {
            denom: norm.common_denominator().to_string(),
            q,
            max_t: MAX_DENOM_POWER,
        }
    })?;
    let log_d = ceil_log(q, d as u64);
    let pad = 2 + log_d + u64::from(t.max(1));
    let mut blocks: Vec<(u64, u64)> = Vec::new();
    for &(m, big_m) in schedule.blocks() {
        let enlarged = (m, big_m + pad);
        match blocks.last_mut() {
            Some(last) if enlarged.0 <= last.1 + 1 => last.1 = last.1.max(enlarged.1),
            _ => blocks.push(enlarged),
        }
    }
    Ok(DigitEnvelope { blocks, pad })
}

/// `ceil(log_q n)` for `n >= 1`.
fn ceil_log(q: u32, n: u64) -> u64 {
    let q = q as u64;
    let mut pow = 1u64;
    let mut e = 0u64;
    while pow < n {
        pow = pow.saturating_mul(q);
        e += 1;
    }
    e
}

// ---------------------------------------------------------------------------
// Envelope verification
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize)]
pub struct EnvelopeReport {
    pub pass: bool,
    pub checked: usize,
    /// First value (ascending) with no in-envelope representation.
    pub counterexample: Option<String>,
    pub pad: u64,
    pub blocks: Vec<(u64, u64)>,
}

/// Decides, for every distance value, whether some signed-digit base-q
/// representation (digits in `-(q-1)..=q-1`) supported inside the envelope
/// levels `[1, depth+1]` represents it exactly. Values must be exact with
/// denominator dividing `q^(depth+1)`.
pub fn verify_envelope(
    distances: &DistanceCloud,
    envelope: &DigitEnvelope,
    q: u32,
    depth: u64,
) -> Result<EnvelopeReport> {
    let CloudData::Exact { denom, coords } = distances.values().data() else {
        return Err(Error::Domain(
            "envelope verification requires exact distance values".into(),
        ));
    };
    let levels = depth + 1;
    let full = BigInt::from(upow(q, levels));
    let (scale, rem) = full.div_rem(denom);
    if !rem.is_zero() {
        let first = distances
            .value_rational(0)
            .map(|v| format_rational(&v))
            .unwrap_or_default();
        return Err(Error::NonQPowerValue {
            value: first,
            q,
            depth,
        });
    }
    let active: Vec<bool> = (0..=levels)
        .map(|m| envelope.contains_level(m))
        .collect();
    let failing = coords
        .par_iter()
        .enumerate()
        .filter_map(|(i, v)| {
            let scaled = v * &scale;
            if envelope_representable(&scaled, q, levels, &active) {
                None
            } else {
                Some(i)
            }
        })
        .min();
    Ok(EnvelopeReport {
        pass: failing.is_none(),
        checked: coords.len(),
        counterexample: failing
            .and_then(|i| distances.value_rational(i))
            .map(|v| format_rational(&v)),
        pad: envelope.pad(),
        blocks: envelope.blocks().to_vec(),
    })
}

/// Carry DP from the least significant position: at each level the residual
/// splits into at most two successors (digit `r` or `r - q`), with inactive
/// levels forcing divisibility. The value is representable iff some branch
/// ends at residual zero.
fn envelope_representable(value: &BigInt, q: u32, levels: u64, active: &[bool]) -> bool {
    let q_big = BigInt::from(q);
    let mut states: Vec<BigInt> = vec![value.clone()];
    for j in 0..levels {
        let m = (levels - j) as usize;
        let mut next: Vec<BigInt> = Vec::with_capacity(states.len() * 2);
        for r in &states {
            let (quot, rem) = r.div_mod_floor(&q_big);
            if active[m] {
                if !rem.is_zero() {
                    next.push(&quot + 1);
                }
                next.push(quot);
            } else if rem.is_zero() {
                next.push(quot);
            }
        }
        next.sort_unstable();
        next.dedup();
        if next.is_empty() {
            return false;
        }
        states = next;
    }
    states.iter().any(|r| r.is_zero())
}

// ---------------------------------------------------------------------------
// Structural distance-set counts for uniform axis norms
// ---------------------------------------------------------------------------

/// If every facet is supported on a single coordinate, all with one common
/// absolute value `c`, and together they touch every coordinate, returns `c`.
/// For such norms `||x - y|| = c * max_i |x_i - y_i|`, so the distance set of
/// a product digit set is `c * |F - F|`.
pub fn uniform_axis_scale(norm: &PolyhedralNorm) -> Option<BigRational> {
    let d = norm.dim();
    let mut covered = vec![false; d];
    let mut value: Option<BigRational> = None;
    for f in norm.facets() {
        let nz: Vec<usize> = (0..d).filter(|&c| !f[c].is_zero()).collect();
        if nz.len() != 1 {
            return None;
        }
        let a = f[nz[0]].clone();
        let a = if a.is_negative() { -a } else { a };
        match &value {
            None => value = Some(a),
            Some(v) if *v == a => {}
            _ => return None,
        }
        covered[nz[0]] = true;
    }
    if covered.iter().all(|&c| c) {
        value
    } else {
        None
    }
}

/// Exact count of distinct level-`m` digit prefixes of the distance set
/// `q^{-shift} * |F - F|` of the depth-truncated scheduled digit set.
///
/// Signed prefixes on a maximal run of `L` scheduled levels take exactly
/// `2 q^L - 1` values (all integers in `(-q^L, q^L)`), runs separated by a
/// gap do not interact for `q >= 3`, and absolute values halve the count:
/// `( prod (2 q^L - 1) + 1 ) / 2`. The grid covering count at `q^{-m}` is
/// sandwiched between this and twice this, so log-log slopes agree up to
/// `log_q 2 / window`.
pub fn sharp_axis_prefix_count(
    schedule: &BlockSchedule,
    depth: u64,
    m: u64,
    shift: u32,
) -> Result<BigUint> {
    let q = schedule.base();
    if q < 3 {
        return Err(Error::Domain(
            "structural distance counts require base >= 3".into(),
        ));
    }
    if m <= shift as u64 {
        return Ok(BigUint::one());
    }
    let j = (m - shift as u64).min(depth);
    // maximal runs of scheduled levels within [1, j] (abutting blocks merge)
    let mut runs: Vec<(u64, u64)> = Vec::new();
    for &(a, b) in schedule.blocks() {
        if a > j {
            break;
        }
        let clip = (a, b.min(j));
        match runs.last_mut() {
            Some(last) if clip.0 == last.1 + 1 => last.1 = clip.1,
            _ => runs.push(clip),
        }
    }
    let mut t = BigUint::one();
    for (a, b) in runs {
        let len = b - a + 1;
        t *= BigUint::from(2u32) * upow(q, len) - BigUint::one();
    }
    Ok((t + BigUint::one()) / BigUint::from(2u32))
}
