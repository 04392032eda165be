//! Grid-based covering counts and box-dimension slope estimation.
//!
//! Covering numbers are realized as occupied-cell counts of an axis-aligned
//! grid anchored at the bounding-box corner of the cloud; this is a
//! bounded-factor surrogate for the minimal ball count, so log-log slopes are
//! unaffected. Counts are exact integers whenever both the cloud and the
//! mesh are rational.

use std::collections::HashSet;
use std::fmt;

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exact::{big_ln, format_rational, integer_log, parse_rational, rational_to_f64, upow};

// ---------------------------------------------------------------------------
// Point clouds
// ---------------------------------------------------------------------------

/// Coordinates of an exact cloud are stored as integer numerators over one
/// shared denominator; digit-set clouds produce this shape natively and the
/// counting kernels stay in integer arithmetic.
#[derive(Clone, Debug)]
pub enum CloudData {
    Exact { denom: BigInt, coords: Vec<BigInt> },
    Float(Vec<f64>),
}

#[derive(Clone, Debug)]
pub struct PointCloud {
    dim: usize,
    data: CloudData,
}

impl PointCloud {
    pub fn from_rationals(dim: usize, points: &[Vec<BigRational>]) -> Result<Self> {
        if points.iter().any(|p| p.len() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: points.iter().map(|p| p.len()).find(|&l| l != dim).unwrap_or(dim),
            });
        }
        let mut denom = BigInt::one();
        for p in points {
            for v in p {
                denom = denom.lcm(v.denom());
            }
        }
        let coords = points
            .iter()
            .flat_map(|p| p.iter().map(|v| v.numer() * (&denom / v.denom())))
            .collect();
        Ok(Self {
            dim,
            data: CloudData::Exact { denom, coords },
        })
    }

    /// Exact cloud from shared-denominator numerators, row-major.
    pub fn from_numerators(dim: usize, denom: BigInt, coords: Vec<BigInt>) -> Result<Self> {
        if dim == 0 || coords.len() % dim != 0 {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: coords.len(),
            });
        }
        if denom.is_zero() || denom.is_negative() {
            return Err(Error::Domain("denominator must be positive".into()));
        }
        Ok(Self {
            dim,
            data: CloudData::Exact { denom, coords },
        })
    }

    pub fn from_f64(dim: usize, coords: Vec<f64>) -> Result<Self> {
        if dim == 0 || coords.len() % dim != 0 {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: coords.len(),
            });
        }
        Ok(Self {
            dim,
            data: CloudData::Float(coords),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        match &self.data {
            CloudData::Exact { coords, .. } => coords.len() / self.dim,
            CloudData::Float(coords) => coords.len() / self.dim,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_exact(&self) -> bool {
        matches!(self.data, CloudData::Exact { .. })
    }

    pub fn data(&self) -> &CloudData {
        &self.data
    }

    pub fn point_f64(&self, i: usize) -> Vec<f64> {
        match &self.data {
            CloudData::Exact { denom, coords } => {
                let d = denom.to_f64().unwrap_or(f64::NAN);
                coords[i * self.dim..(i + 1) * self.dim]
                    .iter()
                    .map(|n| n.to_f64().unwrap_or(f64::NAN) / d)
                    .collect()
            }
            CloudData::Float(coords) => coords[i * self.dim..(i + 1) * self.dim].to_vec(),
        }
    }

    pub fn point_rational(&self, i: usize) -> Option<Vec<BigRational>> {
        match &self.data {
            CloudData::Exact { denom, coords } => Some(
                coords[i * self.dim..(i + 1) * self.dim]
                    .iter()
                    .map(|n| BigRational::new(n.clone(), denom.clone()))
                    .collect(),
            ),
            CloudData::Float(_) => None,
        }
    }

    /// Lossy conversion for float-path pipelines.
    pub fn to_float(&self) -> PointCloud {
        match &self.data {
            CloudData::Float(_) => self.clone(),
            CloudData::Exact { .. } => {
                let coords = (0..self.len()).flat_map(|i| self.point_f64(i)).collect();
                PointCloud {
                    dim: self.dim,
                    data: CloudData::Float(coords),
                }
            }
        }
    }

    /// Per-coordinate minima (the grid anchor) and maxima.
    pub fn bbox_rational(&self) -> Result<(Vec<BigRational>, Vec<BigRational>)> {
        if self.is_empty() {
            return Err(Error::EmptyCloud);
        }
        match &self.data {
            CloudData::Exact { denom, coords } => {
                let mut min = coords[..self.dim].to_vec();
                let mut max = min.clone();
                for row in coords.chunks(self.dim).skip(1) {
                    for (c, v) in row.iter().enumerate() {
                        if v < &min[c] {
                            min[c] = v.clone();
                        }
                        if v > &max[c] {
                            max[c] = v.clone();
                        }
                    }
                }
                let to_rat = |v: Vec<BigInt>| {
                    v.into_iter()
                        .map(|n| BigRational::new(n, denom.clone()))
                        .collect()
                };
                Ok((to_rat(min), to_rat(max)))
            }
            CloudData::Float(_) => {
                let (min, max) = self.bbox_f64()?;
                let conv = |v: Vec<f64>| {
                    v.into_iter()
                        .map(|x| BigRational::from_float(x).unwrap_or_else(BigRational::zero))
                        .collect()
                };
                Ok((conv(min), conv(max)))
            }
        }
    }

    pub fn bbox_f64(&self) -> Result<(Vec<f64>, Vec<f64>)> {
        if self.is_empty() {
            return Err(Error::EmptyCloud);
        }
        let mut min = vec![f64::INFINITY; self.dim];
        let mut max = vec![f64::NEG_INFINITY; self.dim];
        for i in 0..self.len() {
            for (c, v) in self.point_f64(i).into_iter().enumerate() {
                min[c] = min[c].min(v);
                max[c] = max[c].max(v);
            }
        }
        Ok((min, max))
    }

    /// CSV export: one row per point, exact values as `p/q` or fixed-precision
    /// decimals.
    pub fn to_csv(&self, exact: bool, precision: usize) -> String {
        let mut out = String::new();
        for i in 0..self.len() {
            let row: Vec<String> = if exact && self.is_exact() {
                self.point_rational(i)
                    .unwrap()
                    .iter()
                    .map(format_rational)
                    .collect()
            } else {
                self.point_f64(i)
                    .iter()
                    .map(|v| format!("{v:.precision$}"))
                    .collect()
            };
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    /// Parses a CSV body (comment lines starting with `#` are skipped).
    /// Values are exact when every field parses as `p/q` or an integer.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut rows: Vec<Vec<&str>> = Vec::new();
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            rows.push(line.split(',').map(str::trim).collect());
        }
        if rows.is_empty() {
            return Err(Error::EmptyCloud);
        }
        let dim = rows[0].len();
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::Parse("ragged CSV rows".into()));
        }
        let exact = rows
            .iter()
            .all(|r| r.iter().all(|f| !f.contains('.') && !f.contains('e') && !f.contains('E')));
        if exact {
            let pts = rows
                .iter()
                .map(|r| r.iter().map(|f| parse_rational(f)).collect::<Result<_>>())
                .collect::<Result<Vec<Vec<BigRational>>>>()?;
            Self::from_rationals(dim, &pts)
        } else {
            let coords = rows
                .iter()
                .flat_map(|r| r.iter().map(|f| f.parse::<f64>()))
                .collect::<std::result::Result<Vec<f64>, _>>()
                .map_err(|e| Error::Parse(format!("bad float in cloud CSV: {e}")))?;
            Self::from_f64(dim, coords)
        }
    }
}

// ---------------------------------------------------------------------------
// Scales
// ---------------------------------------------------------------------------

/// A covering scale: exact rational mesh or plain float mesh.
#[derive(Clone, Debug)]
pub enum ScaleValue {
    Exact(BigRational),
    Approx(f64),
}

impl ScaleValue {
    /// `q^{-m}` as an exact scale.
    pub fn q_pow(q: u32, m: u64) -> Self {
        ScaleValue::Exact(BigRational::new(BigInt::one(), BigInt::from(upow(q, m))))
    }

    pub fn as_f64(&self) -> f64 {
        match self {
            ScaleValue::Exact(r) => rational_to_f64(r),
            ScaleValue::Approx(v) => *v,
        }
    }

    /// If the scale is exactly `q^{-m}`, returns `m`.
    pub fn qadic_level(&self, q: u32) -> Option<u64> {
        match self {
            ScaleValue::Exact(r) if r.numer().is_one() => {
                integer_log(q, r.denom().magnitude())
            }
            _ => None,
        }
    }
}

impl fmt::Display for ScaleValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScaleValue::Exact(r) => write!(f, "{}", format_rational(r)),
            ScaleValue::Approx(v) => write!(f, "{v}"),
        }
    }
}

// ---------------------------------------------------------------------------
// Grid covering counts
// ---------------------------------------------------------------------------

fn to_i128(n: &BigInt) -> i128 {
    n.to_i128().expect("bit bound checked")
}

/// Number of occupied cells of the mesh-`delta` grid anchored at the
/// bounding-box corner of the cloud. Exact integer arithmetic when both the
/// cloud and the scale are rational.
pub fn grid_covering_count(cloud: &PointCloud, delta: &ScaleValue) -> Result<u64> {
    if cloud.is_empty() {
        return Err(Error::EmptyCloud);
    }
    if delta.as_f64() <= 0.0 {
        return Err(Error::Domain(format!("scale {} not positive", delta)));
    }
    match (&cloud.data, delta) {
        (CloudData::Exact { denom, coords }, ScaleValue::Exact(d)) => {
            let dim = cloud.dim;
            let mut min_num = coords[..dim].to_vec();
            let mut coord_bits = 0u64;
            for row in coords.chunks(dim) {
                for (c, n) in row.iter().enumerate() {
                    if n < &min_num[c] {
                        min_num[c] = n.clone();
                    }
                    coord_bits = coord_bits.max(n.bits());
                }
            }
            // cell_c = floor((num - min_c) * mul / div), reduced; for q-adic
            // clouds and scales the multiplier cancels entirely and the whole
            // computation fits machine integers
            let g = d.denom().gcd(&(denom * d.numer()));
            let mul = d.denom() / &g;
            let div = denom * d.numer() / &g;
            if mul.is_one() && div.bits() <= 120 && coord_bits <= 120 {
                let div_i = to_i128(&div);
                let mins: Vec<i128> = min_num.iter().map(to_i128).collect();
                let cells: HashSet<Vec<i128>> = coords
                    .par_chunks(dim)
                    .map(|row| {
                        row.iter()
                            .enumerate()
                            .map(|(c, n)| (to_i128(n) - mins[c]) / div_i)
                            .collect::<Vec<i128>>()
                    })
                    .collect();
                return Ok(cells.len() as u64);
            }
            let cells: HashSet<Vec<BigInt>> = coords
                .par_chunks(dim)
                .map(|row| {
                    row.iter()
                        .enumerate()
                        .map(|(c, n)| ((n - &min_num[c]) * &mul).div_floor(&div))
                        .collect::<Vec<BigInt>>()
                })
                .collect();
            Ok(cells.len() as u64)
        }
        _ => {
            let d = delta.as_f64();
            let (min, _) = cloud.bbox_f64()?;
            let n = cloud.len();
            let cells: HashSet<Vec<i64>> = (0..n)
                .into_par_iter()
                .map(|i| {
                    cloud
                        .point_f64(i)
                        .iter()
                        .enumerate()
                        .map(|(c, v)| ((v - min[c]) / d).floor() as i64)
                        .collect::<Vec<i64>>()
                })
                .collect();
            Ok(cells.len() as u64)
        }
    }
}

// ---------------------------------------------------------------------------
// Covering profiles
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Provenance {
    /// Exact combinatorial count (digit-set oracle).
    Exact,
    /// Occupied-cell count of a concrete cloud.
    Grid,
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Provenance::Exact => write!(f, "exact"),
            Provenance::Grid => write!(f, "grid"),
        }
    }
}

#[derive(Clone, Debug)]
pub struct ProfileEntry {
    pub scale: ScaleValue,
    pub count: BigUint,
    pub provenance: Provenance,
}

/// Ordered `(scale, count)` pairs, scales strictly decreasing, counts
/// nondecreasing as the scale shrinks.
#[derive(Clone, Debug, Default)]
pub struct CoveringProfile {
    entries: Vec<ProfileEntry>,
    pub ambient_dim: Option<usize>,
    /// Grid anchor (bounding-box corner), recorded for reproducibility.
    pub anchor: Option<Vec<String>>,
}

impl CoveringProfile {
    pub fn new(entries: Vec<ProfileEntry>) -> Result<Self> {
        let p = Self {
            entries,
            ambient_dim: None,
            anchor: None,
        };
        p.validate()?;
        Ok(p)
    }

    fn validate(&self) -> Result<()> {
        for e in &self.entries {
            if e.count.is_zero() {
                return Err(Error::Domain("covering count must be >= 1".into()));
            }
        }
        for w in self.entries.windows(2) {
            if w[1].scale.as_f64() >= w[0].scale.as_f64() {
                return Err(Error::Domain("scales must strictly decrease".into()));
            }
            if w[1].count < w[0].count {
                return Err(Error::Domain(
                    "counts must be nondecreasing as the scale shrinks".into(),
                ));
            }
        }
        Ok(())
    }

    pub fn entries(&self) -> &[ProfileEntry] {
        &self.entries
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("delta,count,provenance\n");
        for e in &self.entries {
            out.push_str(&format!("{},{},{}\n", e.scale, e.count, e.provenance));
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut entries = Vec::new();
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') || line.starts_with("delta") {
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != 3 {
                return Err(Error::Parse(format!("bad profile row {line:?}")));
            }
            let scale = if fields[0].contains('.') || fields[0].contains('e') {
                ScaleValue::Approx(
                    fields[0]
                        .parse()
                        .map_err(|e| Error::Parse(format!("bad delta: {e}")))?,
                )
            } else {
                ScaleValue::Exact(parse_rational(fields[0])?)
            };
            let count: BigUint = fields[1]
                .parse()
                .map_err(|_| Error::Parse(format!("bad count {:?}", fields[1])))?;
            let provenance = match fields[2] {
                "exact" => Provenance::Exact,
                "grid" => Provenance::Grid,
                other => return Err(Error::Parse(format!("bad provenance {other:?}"))),
            };
            entries.push(ProfileEntry {
                scale,
                count,
                provenance,
            });
        }
        Self::new(entries)
    }
}

/// Builds a grid-count profile of `cloud` over the given scales (sorted
/// descending internally).
pub fn grid_profile(cloud: &PointCloud, scales: &[ScaleValue]) -> Result<CoveringProfile> {
    let mut scales: Vec<ScaleValue> = scales.to_vec();
    scales.sort_by(|a, b| b.as_f64().total_cmp(&a.as_f64()));
    let entries = scales
        .iter()
        .map(|s| {
            Ok(ProfileEntry {
                scale: s.clone(),
                count: BigUint::from(grid_covering_count(cloud, s)?),
                provenance: Provenance::Grid,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut profile = CoveringProfile::new(entries)?;
    profile.ambient_dim = Some(cloud.dim());
    let (min, _) = cloud.bbox_rational()?;
    profile.anchor = Some(min.iter().map(format_rational).collect());
    Ok(profile)
}

// ---------------------------------------------------------------------------
// Dimension slopes
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum SlopeMode {
    /// Least-squares slope of `log N` against `-log delta`.
    Regression,
    /// Max slope over consecutive scale pairs: the finite-scale limsup
    /// surrogate.
    MaxTwoPoint,
}

#[derive(Clone, Debug, Serialize)]
pub struct DimensionEstimate {
    pub slope: f64,
    /// `(delta_max, delta_min)` actually used.
    pub window: (f64, f64),
    pub scale_sequence: String,
    pub mode: SlopeMode,
    /// Max deviation of the log-log points from the fitted line.
    pub residual: f64,
    pub points_used: usize,
}

impl DimensionEstimate {
    /// Sanity band `0 <= slope <= d + 0.1`.
    pub fn check_band(&self, ambient_dim: usize) -> Result<()> {
        if self.slope < -1e-12 || self.slope > ambient_dim as f64 + 0.1 {
            return Err(Error::Domain(format!(
                "slope {} outside the sanity band [0, {}]",
                self.slope,
                ambient_dim as f64 + 0.1
            )));
        }
        Ok(())
    }
}

/// Fits a dimension slope to the profile entries whose scale lies in
/// `[delta_min, delta_max]`.
pub fn dimension_slope(
    profile: &CoveringProfile,
    window: (f64, f64),
    mode: SlopeMode,
    scale_sequence: &str,
) -> Result<DimensionEstimate> {
    let (mut dmax, mut dmin) = window;
    if dmax < dmin {
        std::mem::swap(&mut dmax, &mut dmin);
    }
    let pts: Vec<(f64, f64)> = profile
        .entries()
        .iter()
        .filter(|e| {
            let s = e.scale.as_f64();
            s <= dmax * (1.0 + 1e-12) && s >= dmin * (1.0 - 1e-12)
        })
        .map(|e| (-e.scale.as_f64().ln(), big_ln(&e.count)))
        .collect();
    if pts.len() < 2 {
        return Err(Error::InsufficientProfile);
    }
    let slope = match mode {
        SlopeMode::Regression => {
            let n = pts.len() as f64;
            let sx: f64 = pts.iter().map(|p| p.0).sum();
            let sy: f64 = pts.iter().map(|p| p.1).sum();
            let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
            let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
            let denom = n * sxx - sx * sx;
            if denom.abs() < 1e-30 {
                return Err(Error::Domain("degenerate scale window".into()));
            }
            (n * sxy - sx * sy) / denom
        }
        SlopeMode::MaxTwoPoint => pts
            .windows(2)
            .map(|w| (w[1].1 - w[0].1) / (w[1].0 - w[0].0))
            .fold(f64::NEG_INFINITY, f64::max),
    };
    // residual against the line of the returned slope through the mean
    let n = pts.len() as f64;
    let mx: f64 = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my: f64 = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let residual = pts
        .iter()
        .map(|(x, y)| (y - (my + slope * (x - mx))).abs())
        .fold(0.0f64, f64::max);
    Ok(DimensionEstimate {
        slope,
        window: (dmax, dmin),
        scale_sequence: scale_sequence.to_string(),
        mode,
        residual,
        points_used: pts.len(),
    })
}

/// Exact two-point slopes for a profile whose scales are `q^{-m}` and whose
/// counts are exact powers of `q`; `None` when any entry fails that shape.
pub fn exact_qadic_two_point_slopes(
    profile: &CoveringProfile,
    q: u32,
) -> Option<Vec<BigRational>> {
    let mut pts = Vec::new();
    for e in profile.entries() {
        let m = e.scale.qadic_level(q)?;
        let a = integer_log(q, &e.count)?;
        pts.push((m, a));
    }
    if pts.len() < 2 {
        return None;
    }
    Some(
        pts.windows(2)
            .map(|w| {
                BigRational::new(
                    BigInt::from(w[1].1 as i64 - w[0].1 as i64),
                    BigInt::from(w[1].0 as i64 - w[0].0 as i64),
                )
            })
            .collect(),
    )
}
