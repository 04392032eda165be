//! Norm evaluation and differential structure.
//!
//! Two families are supported: polyhedral norms given as the max of finitely
//! many absolute linear functionals, evaluated exactly on rational input, and
//! weighted `l^p` norms (`1 < p < oo`) as the smooth family, with closed-form
//! gradients and dual norms. On top of evaluation sit the cone membership
//! tests, the duality-mapping check, parallelepiped volumes of pinned-distance
//! gradients, and an empirical modulus bounding the first-order Taylor defect
//! of the norm.

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::detrand::CounterRng;
use crate::error::{Error, Result};
use crate::exact::{format_rational, parse_rational, rational_dot, rational_rank};

/// Seed for the crate-internal deterministic samples (sphere and annulus);
/// fixed so published constants are reproducible bit-for-bit.
pub const SAMPLING_SEED: u64 = 0x5EED_0001;

const LAMBDA_SAFETY: f64 = 0.9;
const TIE_RELATIVE_TOL: f64 = 1e-12;

// ---------------------------------------------------------------------------
// Polyhedral norms
// ---------------------------------------------------------------------------

/// `max_i |<x, v_i>|` over a finite facet-functional list spanning `R^d`.
#[derive(Clone, Debug)]
pub struct PolyhedralNorm {
    facets: Vec<Vec<BigRational>>,
    facets_f64: Vec<Vec<f64>>,
    dim: usize,
    common_denominator: BigInt,
}

impl PolyhedralNorm {
    pub fn new(facets: Vec<Vec<BigRational>>) -> Result<Self> {
        if facets.is_empty() {
            return Err(Error::InvalidNorm("no facet functionals".into()));
        }
        let dim = facets[0].len();
        if dim == 0 {
            return Err(Error::InvalidNorm("zero-dimensional facets".into()));
        }
        if facets.iter().any(|f| f.len() != dim) {
            return Err(Error::InvalidNorm("facet length mismatch".into()));
        }
        if facets.len() < dim {
            return Err(Error::NonSpanningFacets {
                rank: facets.len(),
                dim,
            });
        }
        let rank = rational_rank(&facets);
        if rank < dim {
            return Err(Error::NonSpanningFacets { rank, dim });
        }
        let mut common = BigInt::one();
        for f in &facets {
            for e in f {
                common = common.lcm(e.denom());
            }
        }
        let facets_f64 = facets
            .iter()
            .map(|f| f.iter().map(crate::exact::rational_to_f64).collect())
            .collect();
        Ok(Self {
            facets,
            facets_f64,
            dim,
            common_denominator: common,
        })
    }

    /// Convenience constructor from `p/q` strings.
    pub fn from_strs(facets: &[&[&str]]) -> Result<Self> {
        let parsed = facets
            .iter()
            .map(|f| f.iter().map(|s| parse_rational(s)).collect::<Result<_>>())
            .collect::<Result<Vec<Vec<BigRational>>>>()?;
        Self::new(parsed)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn facet_count(&self) -> usize {
        self.facets.len()
    }

    pub fn facets(&self) -> &[Vec<BigRational>] {
        &self.facets
    }

    pub fn facet_f64(&self, i: usize) -> &[f64] {
        &self.facets_f64[i]
    }

    /// Least common denominator of all facet entries.
    pub fn common_denominator(&self) -> &BigInt {
        &self.common_denominator
    }

    pub fn eval_exact(&self, x: &[BigRational]) -> Result<BigRational> {
        self.check_dim(x.len())?;
        let mut best = BigRational::zero();
        for f in &self.facets {
            let v = rational_dot(x, f);
            let a = if v.is_negative() { -v } else { v };
            if a > best {
                best = a;
            }
        }
        Ok(best)
    }

    pub fn eval_f64(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x.len())?;
        let mut best = 0.0f64;
        for f in &self.facets_f64 {
            let v: f64 = f.iter().zip(x).map(|(a, b)| a * b).sum();
            best = best.max(v.abs());
        }
        Ok(best)
    }

    /// Indices of all facets attaining `eval_exact(x)`.
    pub fn max_facets_exact(&self, x: &[BigRational]) -> Result<Vec<usize>> {
        let m = self.eval_exact(x)?;
        Ok(self
            .facets
            .iter()
            .enumerate()
            .filter(|(_, f)| {
                let v = rational_dot(x, f);
                (if v.is_negative() { -v } else { v }) == m
            })
            .map(|(i, _)| i)
            .collect())
    }

    /// Membership in the cone `C(x, v_i)`: the facet `i` attains `||x - y||`.
    pub fn cone_contains_exact(
        &self,
        x: &[BigRational],
        facet: usize,
        y: &[BigRational],
    ) -> Result<bool> {
        self.check_facet(facet)?;
        let diff: Vec<BigRational> = x.iter().zip(y).map(|(a, b)| a - b).collect();
        let norm = self.eval_exact(&diff)?;
        let v = rational_dot(&diff, &self.facets[facet]);
        let a = if v.is_negative() { -v } else { v };
        Ok(a == norm)
    }

    pub fn cone_contains_f64(&self, x: &[f64], facet: usize, y: &[f64]) -> Result<bool> {
        self.check_facet(facet)?;
        let diff: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
        let norm = self.eval_f64(&diff)?;
        let v: f64 = diff
            .iter()
            .zip(&self.facets_f64[facet])
            .map(|(a, b)| a * b)
            .sum();
        Ok(v.abs() >= norm - TIE_RELATIVE_TOL * norm.max(1.0))
    }

    /// Gradient of `u -> ||u||` at a cone interior: the signed maximizing
    /// facet. A tie between distinct facets is an error, not a subgradient.
    fn gradient_f64(&self, u: &[f64]) -> std::result::Result<Vec<f64>, String> {
        let mut best = f64::NEG_INFINITY;
        let mut best_idx = 0usize;
        let mut best_sign = 1.0f64;
        let mut runner_up = f64::NEG_INFINITY;
        for (i, f) in self.facets_f64.iter().enumerate() {
            let v: f64 = f.iter().zip(u).map(|(a, b)| a * b).sum();
            let a = v.abs();
            if a > best {
                runner_up = best;
                best = a;
                best_idx = i;
                best_sign = if v >= 0.0 { 1.0 } else { -1.0 };
            } else if a > runner_up {
                runner_up = a;
            }
        }
        if best <= 0.0 {
            return Err("zero vector".into());
        }
        if (best - runner_up).abs() <= TIE_RELATIVE_TOL * best {
            return Err(format!(
                "facet tie at value {best:.6e}; point lies on a cone boundary"
            ));
        }
        Ok(self.facets_f64[best_idx]
            .iter()
            .map(|c| c * best_sign)
            .collect())
    }

    fn check_dim(&self, got: usize) -> Result<()> {
        if got != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got,
            });
        }
        Ok(())
    }

    fn check_facet(&self, i: usize) -> Result<()> {
        if i >= self.facets.len() {
            return Err(Error::BadIndices(format!(
                "facet {i} out of range 0..{}",
                self.facets.len()
            )));
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Smooth norms: weighted l^p
// ---------------------------------------------------------------------------

/// `(sum_i w_i |x_i|^p)^(1/p)` with `1 < p < oo` and positive weights.
#[derive(Clone, Debug)]
pub struct SmoothNorm {
    p: f64,
    weights: Vec<f64>,
}

impl SmoothNorm {
    pub fn new(p: f64, weights: Vec<f64>) -> Result<Self> {
        if !(p > 1.0 && p.is_finite()) {
            return Err(Error::InvalidNorm(format!("exponent p={p} not in (1, oo)")));
        }
        if weights.is_empty() || weights.iter().any(|w| !(*w > 0.0) || !w.is_finite()) {
            return Err(Error::InvalidNorm("weights must be positive".into()));
        }
        Ok(Self { p, weights })
    }

    pub fn unweighted(p: f64, dim: usize) -> Result<Self> {
        Self::new(p, vec![1.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    pub fn exponent(&self) -> f64 {
        self.p
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x.len())?;
        let s: f64 = x
            .iter()
            .zip(&self.weights)
            .map(|(xi, wi)| wi * xi.abs().powf(self.p))
            .sum();
        Ok(s.powf(1.0 / self.p))
    }

    /// `grad ||x|| = ||x||^{1-p} (w_i |x_i|^{p-1} sgn x_i)_i`, for `x != 0`.
    pub fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        let n = self.eval(x)?;
        if n == 0.0 {
            return Err(Error::ZeroVector);
        }
        let scale = n.powf(1.0 - self.p);
        Ok(x.iter()
            .zip(&self.weights)
            .map(|(xi, wi)| scale * wi * xi.abs().powf(self.p - 1.0) * xi.signum())
            .collect())
    }

    /// Conjugate exponent `p' = p / (p - 1)`.
    pub fn dual_exponent(&self) -> f64 {
        self.p / (self.p - 1.0)
    }

    /// Norm of a functional in the dual space:
    /// `(sum_i w_i^{-1/(p-1)} |f_i|^{p'})^{1/p'}`.
    pub fn dual_norm(&self, f: &[f64]) -> Result<f64> {
        self.check_dim(f.len())?;
        let q = self.dual_exponent();
        let s: f64 = f
            .iter()
            .zip(&self.weights)
            .map(|(fi, wi)| wi.powf(-1.0 / (self.p - 1.0)) * fi.abs().powf(q))
            .sum();
        Ok(s.powf(1.0 / q))
    }

    fn check_dim(&self, got: usize) -> Result<()> {
        if got != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got,
            });
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Tagged norm specification + file format
// ---------------------------------------------------------------------------

#[derive(Clone, Debug)]
pub enum NormSpec {
    Polyhedral(PolyhedralNorm),
    Smooth(SmoothNorm),
}

impl NormSpec {
    pub fn dim(&self) -> usize {
        match self {
            NormSpec::Polyhedral(n) => n.dim(),
            NormSpec::Smooth(n) => n.dim(),
        }
    }

    pub fn eval_f64(&self, x: &[f64]) -> Result<f64> {
        match self {
            NormSpec::Polyhedral(n) => n.eval_f64(x),
            NormSpec::Smooth(n) => n.eval(x),
        }
    }

    /// Gradient of `u -> ||u||` at `u != 0`; errors at polyhedral cone
    /// boundaries (ties) and at the origin.
    pub fn gradient_f64(&self, u: &[f64]) -> std::result::Result<Vec<f64>, String> {
        match self {
            NormSpec::Polyhedral(n) => n.gradient_f64(u),
            NormSpec::Smooth(n) => n.gradient(u).map_err(|e| e.to_string()),
        }
    }

    pub fn as_polyhedral(&self) -> Option<&PolyhedralNorm> {
        match self {
            NormSpec::Polyhedral(n) => Some(n),
            _ => None,
        }
    }

    pub fn as_smooth(&self) -> Option<&SmoothNorm> {
        match self {
            NormSpec::Smooth(n) => Some(n),
            _ => None,
        }
    }

    pub fn describe(&self) -> String {
        match self {
            NormSpec::Polyhedral(n) => {
                format!("polyhedral({} facets, d={})", n.facet_count(), n.dim())
            }
            NormSpec::Smooth(n) => format!("lp(p={}, d={})", n.exponent(), n.dim()),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let repr: NormFile =
            serde_json::from_str(text).map_err(|e| Error::Parse(format!("norm file: {e}")))?;
        repr.try_into()
    }

    pub fn to_json(&self) -> String {
        let repr = NormFile::from(self);
        serde_json::to_string_pretty(&repr).expect("norm serialization")
    }
}

#[derive(Serialize, Deserialize)]
enum NormFile {
    #[serde(rename = "polyhedral")]
    Polyhedral { q: u64, facets: Vec<Vec<String>> },
    #[serde(rename = "lp")]
    Lp { p: f64, weights: Vec<f64> },
}

impl TryFrom<NormFile> for NormSpec {
    type Error = Error;

    fn try_from(f: NormFile) -> Result<Self> {
        match f {
            NormFile::Polyhedral { q, facets } => {
                let parsed = facets
                    .iter()
                    .map(|f| f.iter().map(|s| parse_rational(s)).collect::<Result<_>>())
                    .collect::<Result<Vec<Vec<BigRational>>>>()?;
                let norm = PolyhedralNorm::new(parsed)?;
                let declared = BigInt::from(q);
                if q == 0 || !(&declared % norm.common_denominator()).is_zero() {
                    return Err(Error::InvalidNorm(format!(
                        "declared denominator {q} is not a common denominator (need a multiple of {})",
                        norm.common_denominator()
                    )));
                }
                Ok(NormSpec::Polyhedral(norm))
            }
            NormFile::Lp { p, weights } => Ok(NormSpec::Smooth(SmoothNorm::new(p, weights)?)),
        }
    }
}

impl From<&NormSpec> for NormFile {
    fn from(n: &NormSpec) -> Self {
        match n {
            NormSpec::Polyhedral(p) => NormFile::Polyhedral {
                q: p.common_denominator().to_string().parse().unwrap_or(0),
                facets: p
                    .facets()
                    .iter()
                    .map(|f| f.iter().map(format_rational).collect())
                    .collect(),
            },
            NormSpec::Smooth(s) => NormFile::Lp {
                p: s.exponent(),
                weights: s.weights().to_vec(),
            },
        }
    }
}

// ---------------------------------------------------------------------------
// Euclidean cones X(a, V, s)
// ---------------------------------------------------------------------------

/// `X(a, V, s) = { x : ||P_{V^perp}(x - a)|| < s ||x - a|| }` with Euclidean
/// norms; `V` stored as an orthonormal basis.
#[derive(Clone, Debug)]
pub struct ConeSpec {
    apex: Vec<f64>,
    basis: Vec<Vec<f64>>,
    aperture: f64,
}

impl ConeSpec {
    pub fn new(apex: Vec<f64>, basis: Vec<Vec<f64>>, aperture: f64) -> Result<Self> {
        if !(aperture > 0.0 && aperture < 1.0) {
            return Err(Error::Domain(format!(
                "aperture {aperture} outside (0, 1)"
            )));
        }
        let d = apex.len();
        if basis.is_empty() || basis.len() > d || basis.iter().any(|b| b.len() != d) {
            return Err(Error::Domain("basis shape invalid".into()));
        }
        for i in 0..basis.len() {
            for j in i..basis.len() {
                let dot: f64 = basis[i].iter().zip(&basis[j]).map(|(a, b)| a * b).sum();
                let expect = if i == j { 1.0 } else { 0.0 };
                if (dot - expect).abs() > 1e-12 {
                    return Err(Error::Domain(format!(
                        "basis not orthonormal: <b{i}, b{j}> = {dot}"
                    )));
                }
            }
        }
        Ok(Self {
            apex,
            basis,
            aperture,
        })
    }

    /// Builds the cone around the span of a single direction (normalized
    /// internally).
    pub fn around_direction(apex: Vec<f64>, direction: &[f64], aperture: f64) -> Result<Self> {
        let n: f64 = direction.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n == 0.0 {
            return Err(Error::ZeroVector);
        }
        let b = direction.iter().map(|x| x / n).collect();
        Self::new(apex, vec![b], aperture)
    }

    /// Strict membership test; errors when `x` equals the apex.
    pub fn contains(&self, x: &[f64]) -> Result<bool> {
        if x.len() != self.apex.len() {
            return Err(Error::DimensionMismatch {
                expected: self.apex.len(),
                got: x.len(),
            });
        }
        let u: Vec<f64> = x.iter().zip(&self.apex).map(|(a, b)| a - b).collect();
        let norm_sq: f64 = u.iter().map(|v| v * v).sum();
        if norm_sq == 0.0 {
            return Err(Error::PointAtApex);
        }
        let mut proj_sq = 0.0;
        for b in &self.basis {
            let c: f64 = u.iter().zip(b).map(|(a, v)| a * v).sum();
            proj_sq += c * c;
        }
        let perp_sq = (norm_sq - proj_sq).max(0.0);
        Ok(perp_sq < self.aperture * self.aperture * norm_sq)
    }
}

// ---------------------------------------------------------------------------
// Duality mapping check
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize)]
pub struct DualityReport {
    /// `|<f, x> - ||f||_dual ||x|||` with `f = ||x|| grad ||x||`.
    pub pairing_residual: f64,
    /// `| ||f||_dual - ||x|| |`.
    pub norm_residual: f64,
    pub tol: f64,
    pub pass: bool,
}

/// Checks that `f := ||x|| grad ||x||` acts as the duality mapping at `x`:
/// it norms `x` and has dual norm `||x||`.
pub fn duality_check(norm: &SmoothNorm, x: &[f64], tol: f64) -> Result<DualityReport> {
    let n = norm.eval(x)?;
    if n == 0.0 {
        return Err(Error::ZeroVector);
    }
    let g = norm.gradient(x)?;
    let f: Vec<f64> = g.iter().map(|gi| gi * n).collect();
    let pairing: f64 = f.iter().zip(x).map(|(a, b)| a * b).sum();
    let dual = norm.dual_norm(&f)?;
    let pairing_residual = (pairing - dual * n).abs();
    let norm_residual = (dual - n).abs();
    Ok(DualityReport {
        pairing_residual,
        norm_residual,
        tol,
        pass: pairing_residual <= tol && norm_residual <= tol,
    })
}

// ---------------------------------------------------------------------------
// Transversality volumes
// ---------------------------------------------------------------------------

/// Volume of the parallelepiped spanned by the gradients of the pinned
/// distance maps `x -> ||x - z_i||` at `x`, via the Gram determinant.
///
/// Polyhedral norms require `x` to lie in the interior of a cone of every
/// pin; a facet tie is reported as an error naming the offending pin.
pub fn transversality_volume(norm: &NormSpec, x: &[f64], pins: &[Vec<f64>]) -> Result<f64> {
    if pins.is_empty() {
        return Err(Error::Domain("no pins given".into()));
    }
    let mut grads = Vec::with_capacity(pins.len());
    for (i, z) in pins.iter().enumerate() {
        let u: Vec<f64> = x.iter().zip(z).map(|(a, b)| a - b).collect();
        if u.iter().all(|v| *v == 0.0) {
            return Err(Error::GradientUndefined {
                pin: i,
                reason: "x equals the pin".into(),
            });
        }
        let g = norm
            .gradient_f64(&u)
            .map_err(|reason| Error::GradientUndefined { pin: i, reason })?;
        grads.push(g);
    }
    let k = grads.len();
    let mut gram = vec![vec![0.0f64; k]; k];
    for i in 0..k {
        for j in i..k {
            let v: f64 = grads[i].iter().zip(&grads[j]).map(|(a, b)| a * b).sum();
            gram[i][j] = v;
            gram[j][i] = v;
        }
    }
    Ok(det_in_place(gram).max(0.0).sqrt())
}

/// Determinant by partial-pivoted elimination; adequate for the small
/// (k <= d) Gram matrices used here.
fn det_in_place(mut m: Vec<Vec<f64>>) -> f64 {
    let n = m.len();
    let mut det = 1.0f64;
    for col in 0..n {
        let (pivot, max) = (col..n)
            .map(|r| (r, m[r][col].abs()))
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap();
        if max == 0.0 {
            return 0.0;
        }
        if pivot != col {
            m.swap(col, pivot);
            det = -det;
        }
        det *= m[col][col];
        for r in col + 1..n {
            let factor = m[r][col] / m[col][col];
            for c in col..n {
                m[r][c] -= factor * m[col][c];
            }
        }
    }
    det
}

// ---------------------------------------------------------------------------
// Empirical gradient modulus h(eps)
// ---------------------------------------------------------------------------

/// Empirical bound for
/// `sup { |<grad ||x||, x - y>| - | ||x|| - ||y|| | : ||x - y|| < eps }`
/// over a deterministic sample with `||x||` in `[1/2, 2]`.
///
/// The sample of candidate pairs is fixed by `SAMPLING_SEED` and filtered by
/// separation, so the result is a running max over a nested family:
/// monotone in `eps` by construction.
pub fn modulus_h(norm: &SmoothNorm, eps: f64, budget: u64) -> f64 {
    if eps <= 0.0 {
        return 0.0;
    }
    let d = norm.dim();
    let rng = CounterRng::new(SAMPLING_SEED);
    let dirs = rng.stream(1);
    let seps = rng.stream(2);
    // log-uniform separations down to 1e-9 so small eps still sees pairs
    let log_span = (2.0f64 / 1e-9).ln();
    let phi = 0.618_033_988_749_894_9_f64;
    let mut h = 0.0f64;
    for j in 0..budget {
        let sep = 2.0 * (-((j as f64 * phi).fract()) * log_span).exp();
        if sep >= eps {
            continue;
        }
        let xdir = dirs.unit_vector_at(2 * j, d);
        let xn = norm.eval(&xdir).expect("dim");
        // norm value spread over [1/2, 2]
        let target = 0.5 * 4.0f64.powf((j as f64 * phi * phi).fract());
        let x: Vec<f64> = xdir.iter().map(|v| v * target / xn).collect();
        let ydir = seps.unit_vector_at(2 * j + 1, d);
        let yn = norm.eval(&ydir).expect("dim");
        let y: Vec<f64> = x
            .iter()
            .zip(&ydir)
            .map(|(xi, di)| xi + di * sep / yn)
            .collect();
        let g = norm.gradient(&x).expect("x != 0");
        let pairing: f64 = g.iter().zip(x.iter().zip(&y)).map(|(gi, (xi, yi))| gi * (xi - yi)).sum();
        let defect = pairing.abs() - (norm.eval(&x).unwrap() - norm.eval(&y).unwrap()).abs();
        if defect > h {
            h = defect;
        }
    }
    h
}

// ---------------------------------------------------------------------------
// Lemma-direction constants
// ---------------------------------------------------------------------------

/// Lower bound `Lambda` for `<z, grad ||z||> / |z|` (Euclidean length in the
/// denominator) over the unit sphere: the minimum over a dense deterministic
/// sample, scaled by a 0.9 safety factor.
pub fn lambda_constant(norm: &SmoothNorm) -> f64 {
    let d = norm.dim();
    let rng = CounterRng::new(SAMPLING_SEED).stream(3);
    let mut min = f64::INFINITY;
    let mut consider = |z: &[f64]| {
        if let Ok(g) = norm.gradient(z) {
            let dot: f64 = z.iter().zip(&g).map(|(a, b)| a * b).sum();
            let len: f64 = z.iter().map(|v| v * v).sum::<f64>().sqrt();
            let ratio = dot / len;
            if ratio < min {
                min = ratio;
            }
        }
    };
    for i in 0..4096u64 {
        consider(&rng.unit_vector_at(i, d));
    }
    // axes and sign-pattern diagonals are the usual extremizers
    for i in 0..d {
        let mut e = vec![0.0; d];
        e[i] = 1.0;
        consider(&e);
        e[i] = -1.0;
        consider(&e);
    }
    if d <= 16 {
        let scale = 1.0 / (d as f64).sqrt();
        for mask in 0..(1u32 << d) {
            let z: Vec<f64> = (0..d)
                .map(|i| if mask >> i & 1 == 1 { -scale } else { scale })
                .collect();
            consider(&z);
        }
    }
    LAMBDA_SAFETY * min
}

/// Aperture `eta = sqrt(1 - Lambda^2)` for the direction cone
/// `X(0, span(grad ||z||), eta)` containing every `z != 0`.
pub fn direction_eta(norm: &SmoothNorm) -> f64 {
    let lambda = lambda_constant(norm);
    (1.0 - lambda * lambda).max(0.0).sqrt()
}
