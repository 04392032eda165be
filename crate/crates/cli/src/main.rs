//! Batch front-end for the distdim pipelines.
//!
//! Every subcommand reads/writes plain text (CSV, JSON, schedule lines) with
//! a reproducible header: the seed and all tolerances are echoed, and the
//! timestamp line can be suppressed so identical configurations produce
//! byte-identical files.
//!
//! Exit codes: 0 all checks pass, 2 a mathematical check failed,
//! 1 usage or I/O error.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use num_rational::BigRational;
use num_traits::One;

use distdim::covering::{
    dimension_slope, grid_covering_count, grid_profile, CoveringProfile, PointCloud, ScaleValue,
    SlopeMode,
};
use distdim::detrand::CounterRng;
use distdim::digitsets::{BlockSchedule, DigitFractal, ENUMERATION_CAP};
use distdim::distance::{
    digit_envelope, distance_set, pinned_distance_set, sharp_axis_prefix_count,
    uniform_axis_scale, verify_envelope, PairOptions,
};
use distdim::exact::{min_power_dividing, parse_rational};
use distdim::norms::{
    duality_check, direction_eta, lambda_constant, modulus_h, transversality_volume, ConeSpec,
    NormSpec,
};
use distdim::projections::{candidate_pins, jarvenpaa_check, weak_transversality_scan, ProjectionFamily};

#[derive(Parser)]
#[command(name = "distdim", version, about = "Distance-set dimension pipelines")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a digit-block fractal: schedule file plus point-cloud CSV.
    BuildSet(BuildSet),
    /// Grid covering counts of a cloud at q-adic scales.
    CoveringProfile(CoveringProfileCmd),
    /// Covering profile of a (pinned or pairwise) distance cloud.
    DistanceProfile(DistanceProfile),
    /// Pinned-distance lower bound: best pin slope vs (1/d) set slope.
    VerifyBound(VerifyBound),
    /// Sharp-set upper bracket: envelope certification plus checkpoint slope.
    VerifySharpness(VerifySharpness),
    /// Coordinate-projection max slope vs (n/d) set slope.
    Jarvenpaa(Jarvenpaa),
    /// Norm constants, duality residuals, gradient modulus, pin volumes.
    TransversalityReport(TransversalityReport),
    /// Fiber-cover exponents over a delta sequence.
    FiberScan(FiberScan),
}

#[derive(Args)]
struct CommonOut {
    /// Seed for every stochastic ingredient (echoed into headers).
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Suppress the timestamp header line (byte-identical reruns).
    #[arg(long)]
    no_timestamp: bool,
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    let outcome = match cli.command {
        Command::BuildSet(c) => c.run(),
        Command::CoveringProfile(c) => c.run(),
        Command::DistanceProfile(c) => c.run(),
        Command::VerifyBound(c) => c.run(),
        Command::VerifySharpness(c) => c.run(),
        Command::Jarvenpaa(c) => c.run(),
        Command::TransversalityReport(c) => c.run(),
        Command::FiberScan(c) => c.run(),
    };
    match outcome {
        Ok(true) => std::process::exit(0),
        Ok(false) => std::process::exit(2),
        Err(e) => {
            eprintln!("distdim: {e}");
            std::process::exit(1);
        }
    }
}

type CmdResult = Result<bool, Box<dyn std::error::Error>>;

// ---------------------------------------------------------------------------
// Shared helpers
// ---------------------------------------------------------------------------

fn header(cmd: &str, opts: &[(&str, String)], timestamp: bool) -> String {
    let mut h = format!("# distdim {} {}\n", env!("CARGO_PKG_VERSION"), cmd);
    if timestamp {
        let now = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        let _ = writeln!(h, "# timestamp-unix: {now}");
    }
    for (k, v) in opts {
        let _ = writeln!(h, "# {k}={v}");
    }
    h
}

fn read_cloud(path: &Path) -> Result<PointCloud, Box<dyn std::error::Error>> {
    let text = std::fs::read_to_string(path)?;
    Ok(PointCloud::from_csv(&text)?)
}

fn read_norm(path: &Path) -> Result<NormSpec, Box<dyn std::error::Error>> {
    let text = std::fs::read_to_string(path)?;
    Ok(NormSpec::from_json(&text)?)
}

/// `"1..12"` or `"1,4,9"` into ascending levels.
fn parse_levels(s: &str) -> Result<Vec<u64>, String> {
    let levels: Vec<u64> = if let Some((a, b)) = s.split_once("..") {
        let a: u64 = a.trim().parse().map_err(|_| format!("bad level {a:?}"))?;
        let b: u64 = b.trim().parse().map_err(|_| format!("bad level {b:?}"))?;
        if a > b {
            return Err(format!("empty level range {s:?}"));
        }
        (a..=b).collect()
    } else {
        s.split(',')
            .map(|f| f.trim().parse().map_err(|_| format!("bad level {f:?}")))
            .collect::<Result<_, _>>()?
    };
    if levels.is_empty() || levels.windows(2).any(|w| w[1] <= w[0]) {
        return Err(format!("levels {s:?} must be ascending"));
    }
    Ok(levels)
}

/// Comma list of floats, each either plain or `B^E` (e.g. `2^-7`).
fn parse_deltas(s: &str) -> Result<Vec<f64>, String> {
    s.split(',')
        .map(|f| {
            let f = f.trim();
            if let Some((b, e)) = f.split_once('^') {
                let b: f64 = b.trim().parse().map_err(|_| format!("bad delta {f:?}"))?;
                let e: f64 = e.trim().parse().map_err(|_| format!("bad delta {f:?}"))?;
                Ok(b.powf(e))
            } else {
                f.parse().map_err(|_| format!("bad delta {f:?}"))
            }
        })
        .collect()
}

/// `"x,y;x,y"` into float points.
fn parse_points(s: &str, dim: usize) -> Result<Vec<Vec<f64>>, String> {
    let pts: Vec<Vec<f64>> = s
        .split(';')
        .map(|p| {
            p.split(',')
                .map(|f| f.trim().parse().map_err(|_| format!("bad coordinate {f:?}")))
                .collect::<Result<Vec<f64>, _>>()
        })
        .collect::<Result<_, _>>()?;
    if pts.iter().any(|p| p.len() != dim) {
        return Err(format!("pins must have {dim} coordinates"));
    }
    Ok(pts)
}

fn parse_rational_point(s: &str) -> Result<Vec<BigRational>, Box<dyn std::error::Error>> {
    Ok(s.split(',')
        .map(|f| parse_rational(f.trim()))
        .collect::<Result<Vec<_>, _>>()?)
}

fn qadic_scales(q: u32, levels: &[u64]) -> Vec<ScaleValue> {
    levels.iter().map(|&m| ScaleValue::q_pow(q, m)).collect()
}

fn window_of(scales: &[ScaleValue]) -> (f64, f64) {
    let vals: Vec<f64> = scales.iter().map(ScaleValue::as_f64).collect();
    (
        vals.iter().copied().fold(f64::MIN, f64::max),
        vals.iter().copied().fold(f64::MAX, f64::min),
    )
}

fn write_json(
    path: &Path,
    value: &serde_json::Value,
) -> Result<(), Box<dyn std::error::Error>> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

fn meta_json(cmd: &str, seed: u64, timestamp: bool, fields: &[(&str, serde_json::Value)]) -> serde_json::Value {
    let mut m = serde_json::Map::new();
    m.insert("tool".into(), format!("distdim {}", env!("CARGO_PKG_VERSION")).into());
    m.insert("command".into(), cmd.into());
    m.insert("seed".into(), seed.into());
    if timestamp {
        let now = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        m.insert("timestamp_unix".into(), now.into());
    }
    for (k, v) in fields {
        m.insert((*k).into(), v.clone());
    }
    serde_json::Value::Object(m)
}

// ---------------------------------------------------------------------------
// build-set
// ---------------------------------------------------------------------------

#[derive(Args)]
struct BuildSet {
    /// Digit base.
    #[arg(long, default_value_t = 3)]
    q: u32,
    /// Target limsup density (s/d of the constructed set).
    #[arg(long)]
    rho: f64,
    /// Number of schedule blocks.
    #[arg(long)]
    blocks: usize,
    /// Ambient dimension (product power of the line set).
    #[arg(long, default_value_t = 1)]
    d: usize,
    /// Truncation depth; defaults to the last checkpoint + 2.
    #[arg(long)]
    depth: Option<u64>,
    /// Sample this many points instead of enumerating all of them.
    #[arg(long)]
    sample: Option<u64>,
    /// Output path prefix: writes PREFIX.schedule.txt and PREFIX.cloud.csv.
    #[arg(long)]
    out: PathBuf,
    /// Emit cloud coordinates as decimals with this precision instead of p/q.
    #[arg(long)]
    decimals: Option<usize>,
    #[command(flatten)]
    common: CommonOut,
}

impl BuildSet {
    fn run(self) -> CmdResult {
        let schedule = BlockSchedule::for_density(self.rho, self.blocks, self.q)?;
        let depth = self
            .depth
            .unwrap_or_else(|| schedule.checkpoints().last().unwrap() + 2);
        let fractal = DigitFractal::new(schedule.clone(), depth, self.d)?;
        let cloud = match self.sample {
            Some(n) => fractal.sample_points(n, self.common.seed)?,
            None => fractal.enumerate_points(ENUMERATION_CAP)?,
        };
        let opts = [
            ("q", self.q.to_string()),
            ("rho", self.rho.to_string()),
            ("blocks", self.blocks.to_string()),
            ("d", self.d.to_string()),
            ("depth", depth.to_string()),
            ("seed", self.common.seed.to_string()),
            (
                "points",
                match self.sample {
                    Some(n) => format!("sampled:{n}"),
                    None => format!("enumerated:{}", cloud.len()),
                },
            ),
        ];
        let sched_path = self.out.with_extension("schedule.txt");
        let cloud_path = self.out.with_extension("cloud.csv");
        std::fs::write(
            &sched_path,
            format!(
                "{}{}",
                header("build-set", &opts, !self.common.no_timestamp),
                schedule.to_text()
            ),
        )?;
        let body = match self.decimals {
            Some(p) => cloud.to_csv(false, p),
            None => cloud.to_csv(true, 0),
        };
        std::fs::write(
            &cloud_path,
            format!(
                "{}{}",
                header("build-set", &opts, !self.common.no_timestamp),
                body
            ),
        )?;
        println!(
            "build-set: {} blocks, depth {depth}, {} points -> {} / {}",
            self.blocks,
            cloud.len(),
            sched_path.display(),
            cloud_path.display()
        );
        Ok(true)
    }
}

// ---------------------------------------------------------------------------
// covering-profile
// ---------------------------------------------------------------------------

#[derive(Args)]
struct CoveringProfileCmd {
    #[arg(long)]
    cloud: PathBuf,
    #[arg(long, default_value_t = 3)]
    q: u32,
    /// q-adic levels, e.g. `1..12` or `4,9,17`.
    #[arg(long)]
    levels: String,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    common: CommonOut,
}

impl CoveringProfileCmd {
    fn run(self) -> CmdResult {
        let cloud = read_cloud(&self.cloud)?;
        let levels = parse_levels(&self.levels)?;
        let scales = qadic_scales(self.q, &levels);
        let profile = grid_profile(&cloud, &scales)?;
        let est = dimension_slope(
            &profile,
            window_of(&scales),
            SlopeMode::MaxTwoPoint,
            "q-adic levels",
        )?;
        let opts = [
            ("q", self.q.to_string()),
            ("levels", self.levels.clone()),
            ("seed", self.common.seed.to_string()),
            ("anchor", profile.anchor.clone().unwrap_or_default().join(" ")),
            ("max_two_point_slope", est.slope.to_string()),
        ];
        std::fs::write(
            &self.out,
            format!(
                "{}{}",
                header("covering-profile", &opts, !self.common.no_timestamp),
                profile.to_csv()
            ),
        )?;
        println!(
            "covering-profile: {} scales, max-two-point slope {:.4} -> {}",
            levels.len(),
            est.slope,
            self.out.display()
        );
        Ok(true)
    }
}

// ---------------------------------------------------------------------------
// distance-profile
// ---------------------------------------------------------------------------

#[derive(Args)]
struct DistanceProfile {
    #[arg(long)]
    cloud: PathBuf,
    #[arg(long)]
    norm: PathBuf,
    /// Pin coordinates (`1/3,0` or decimals); pairwise distances if omitted.
    #[arg(long, allow_hyphen_values = true)]
    pin: Option<String>,
    /// Sample this many pairs instead of all of them.
    #[arg(long)]
    sample_pairs: Option<u64>,
    #[arg(long, default_value_t = 3)]
    q: u32,
    #[arg(long)]
    levels: String,
    #[arg(long)]
    out: PathBuf,
    /// Also dump the distance values as CSV.
    #[arg(long)]
    dump: Option<PathBuf>,
    #[command(flatten)]
    common: CommonOut,
}

impl DistanceProfile {
    fn run(self) -> CmdResult {
        let cloud = read_cloud(&self.cloud)?;
        let norm = read_norm(&self.norm)?;
        let levels = parse_levels(&self.levels)?;
        let dcloud = match &self.pin {
            Some(p) => pinned_distance_set(&cloud, &norm, &parse_rational_point(p)?)?,
            None => distance_set(
                &cloud,
                &norm,
                &PairOptions {
                    sample: self.sample_pairs.map(|n| (n, self.common.seed)),
                    ..Default::default()
                },
            )?,
        };
        let scales = qadic_scales(self.q, &levels);
        let profile = grid_profile(dcloud.values(), &scales)?;
        let est = dimension_slope(
            &profile,
            window_of(&scales),
            SlopeMode::MaxTwoPoint,
            "q-adic levels",
        )?;
        let opts = [
            ("q", self.q.to_string()),
            ("levels", self.levels.clone()),
            ("seed", self.common.seed.to_string()),
            ("norm", norm.describe()),
            (
                "source",
                serde_json::to_string(dcloud.source()).unwrap_or_default(),
            ),
            ("max_two_point_slope", est.slope.to_string()),
        ];
        std::fs::write(
            &self.out,
            format!(
                "{}{}",
                header("distance-profile", &opts, !self.common.no_timestamp),
                profile.to_csv()
            ),
        )?;
        if let Some(dump) = &self.dump {
            std::fs::write(
                dump,
                format!(
                    "{}{}",
                    header("distance-profile", &opts, !self.common.no_timestamp),
                    dcloud.to_csv(dcloud.is_exact(), 12)
                ),
            )?;
        }
        println!(
            "distance-profile: {} values, max-two-point slope {:.4} -> {}",
            dcloud.len(),
            est.slope,
            self.out.display()
        );
        Ok(true)
    }
}

// ---------------------------------------------------------------------------
// verify-bound
// ---------------------------------------------------------------------------

#[derive(Args)]
struct VerifyBound {
    #[arg(long)]
    cloud: PathBuf,
    #[arg(long)]
    norm: PathBuf,
    #[arg(long, default_value_t = 3)]
    q: u32,
    /// Declared checkpoint levels for both slopes.
    #[arg(long)]
    levels: String,
    /// Slack epsilon in `pinned >= (1/d) set - tol`.
    #[arg(long, default_value_t = 0.1)]
    tol: f64,
    /// Explicit pins `x,y;x,y`; eight deterministic candidates if omitted.
    #[arg(long, allow_hyphen_values = true)]
    pins: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    common: CommonOut,
}

impl VerifyBound {
    fn run(self) -> CmdResult {
        let cloud = read_cloud(&self.cloud)?.to_float();
        let norm = read_norm(&self.norm)?;
        let d = cloud.dim();
        let levels = parse_levels(&self.levels)?;
        let scales = qadic_scales(self.q, &levels);
        let window = window_of(&scales);
        let set_profile = grid_profile(&cloud, &scales)?;
        let set_est = dimension_slope(&set_profile, window, SlopeMode::MaxTwoPoint, "q-adic levels")?;
        let pins = match &self.pins {
            Some(p) => parse_points(p, d)?,
            None => candidate_pins(&cloud, 8)?,
        };
        let mut best: Option<(usize, f64)> = None;
        let mut pin_rows = Vec::new();
        for (i, pin) in pins.iter().enumerate() {
            let pin_rat: Vec<BigRational> = pin
                .iter()
                .map(|v| BigRational::from_float(*v).unwrap_or_else(BigRational::one))
                .collect();
            let dcloud = pinned_distance_set(&cloud, &norm, &pin_rat)?;
            let profile = grid_profile(dcloud.values(), &scales)?;
            let est = dimension_slope(&profile, window, SlopeMode::MaxTwoPoint, "q-adic levels")?;
            pin_rows.push(serde_json::json!({
                "pin": pin,
                "slope": est.slope,
            }));
            if best.is_none_or(|(_, s)| est.slope > s) {
                best = Some((i, est.slope));
            }
        }
        let (best_pin, best_slope) = best.expect("at least one pin");
        let threshold = set_est.slope / d as f64 - self.tol;
        let pass = best_slope >= threshold;
        let report = serde_json::json!({
            "meta": meta_json("verify-bound", self.common.seed, !self.common.no_timestamp, &[
                ("q", self.q.into()),
                ("levels", levels.clone().into()),
                ("tol", self.tol.into()),
                ("scale_sequence", "q-adic checkpoint levels".into()),
                ("slope_mode", "max-two-point".into()),
                ("norm", norm.describe().into()),
            ]),
            "set_slope": set_est.slope,
            "set_residual": set_est.residual,
            "pins": pin_rows,
            "best_pin_index": best_pin,
            "best_pin_slope": best_slope,
            "threshold": threshold,
            "pass": pass,
        });
        if let Some(out) = &self.out {
            write_json(out, &report)?;
        }
        println!(
            "verify-bound: {} — best pin slope {:.4} vs threshold {:.4} (set {:.4}, d={})",
            if pass { "PASS" } else { "FAIL" },
            best_slope,
            threshold,
            set_est.slope,
            d
        );
        Ok(pass)
    }
}

// ---------------------------------------------------------------------------
// verify-sharpness
// ---------------------------------------------------------------------------

#[derive(Args)]
struct VerifySharpness {
    #[arg(long, default_value_t = 3)]
    q: u32,
    #[arg(long)]
    rho: f64,
    #[arg(long)]
    blocks: usize,
    #[arg(long, default_value_t = 2)]
    d: usize,
    #[arg(long)]
    norm: PathBuf,
    /// Truncation depth; defaults to last checkpoint + 4.
    #[arg(long)]
    depth: Option<u64>,
    /// Exact sample of the product set used for certification.
    #[arg(long, default_value_t = 2000)]
    sample_points: u64,
    /// Sampled pairs whose distances are certified.
    #[arg(long, default_value_t = 100_000)]
    pairs: u64,
    /// Slack for the upper bracket `slope <= rho + tol`.
    #[arg(long, default_value_t = 0.05)]
    tol: f64,
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    common: CommonOut,
}

impl VerifySharpness {
    fn run(self) -> CmdResult {
        let norm = read_norm(&self.norm)?;
        let Some(poly) = norm.as_polyhedral() else {
            return Err("verify-sharpness requires a rational polyhedral norm".into());
        };
        let schedule = BlockSchedule::for_density(self.rho, self.blocks, self.q)?;
        let checkpoints = schedule.checkpoints();
        let depth = self.depth.unwrap_or_else(|| checkpoints.last().unwrap() + 4);
        let envelope = digit_envelope(&schedule, self.q, self.d, poly)?;

        // certification on exactly sampled pair distances
        let fractal = DigitFractal::new(schedule.clone(), depth, self.d)?;
        let cloud = fractal.sample_points(self.sample_points, self.common.seed)?;
        let dcloud = distance_set(
            &cloud,
            &norm,
            &PairOptions {
                sample: Some((self.pairs, self.common.seed)),
                ..Default::default()
            },
        )?;
        let cert = verify_envelope(&dcloud, &envelope, self.q, depth)?;

        // upper bracket: structural checkpoint counts for uniform axis norms,
        // envelope densities otherwise
        let shift = uniform_axis_scale(poly).and_then(|c| {
            if c.numer().is_one() {
                min_power_dividing(self.q, c.denom(), 6)
            } else {
                None
            }
        });
        let cps: Vec<u64> = checkpoints.iter().copied().filter(|&m| m <= depth).collect();
        let (upper_slope, upper_kind) = match shift {
            Some(t) => {
                let entries = cps
                    .iter()
                    .map(|&m| {
                        Ok(distdim::covering::ProfileEntry {
                            scale: ScaleValue::q_pow(self.q, m),
                            count: sharp_axis_prefix_count(&schedule, depth, m, t)?,
                            provenance: distdim::covering::Provenance::Exact,
                        })
                    })
                    .collect::<Result<Vec<_>, distdim::Error>>()?;
                let profile = CoveringProfile::new(entries)?;
                let est = dimension_slope(
                    &profile,
                    window_of(&qadic_scales(self.q, &cps)),
                    SlopeMode::Regression,
                    "checkpoint M_k",
                )?;
                (est.slope, "structural-count regression")
            }
            None => {
                let last = *cps.last().unwrap();
                (envelope.density_f64(last), "envelope density at last checkpoint")
            }
        };

        // lower estimate: grid slope of the sampled distance cloud over the
        // unsaturated checkpoint prefix
        let saturation = (dcloud.len() as u64) / 2;
        let mut lower_levels = Vec::new();
        for &m in &cps {
            let c = grid_covering_count(dcloud.values(), &ScaleValue::q_pow(self.q, m))?;
            lower_levels.push((m, c));
            if c > saturation {
                break;
            }
        }
        let lower_slope = if lower_levels.len() >= 2 {
            let first = lower_levels.first().unwrap();
            let last = lower_levels.last().unwrap();
            Some(
                ((last.1 as f64).ln() - (first.1 as f64).ln())
                    / ((last.0 - first.0) as f64 * (self.q as f64).ln()),
            )
        } else {
            None
        };

        let target = self.rho;
        let pass = cert.pass && upper_slope <= target + self.tol;
        let report = serde_json::json!({
            "meta": meta_json("verify-sharpness", self.common.seed, !self.common.no_timestamp, &[
                ("q", self.q.into()),
                ("rho", self.rho.into()),
                ("blocks", self.blocks.into()),
                ("d", self.d.into()),
                ("depth", depth.into()),
                ("tol", self.tol.into()),
                ("pad", envelope.pad().into()),
                ("scale_sequence", "checkpoint M_k".into()),
                ("norm", norm.describe().into()),
            ]),
            "envelope": {
                "blocks": envelope.blocks(),
                "pad": envelope.pad(),
                "certified": cert.pass,
                "checked_values": cert.checked,
                "counterexample": cert.counterexample,
            },
            "upper_bracket": {
                "slope": upper_slope,
                "kind": upper_kind,
                "target": target,
                "tol": self.tol,
            },
            "lower_estimate": {
                "slope": lower_slope,
                "levels": lower_levels.iter().map(|&(m, c)| serde_json::json!([m, c])).collect::<Vec<_>>(),
                "note": "sampled grid counts; an estimate, not a bound",
            },
            "pass": pass,
        });
        if let Some(out) = &self.out {
            write_json(out, &report)?;
        }
        println!(
            "verify-sharpness: {} — certified={} upper {:.4} vs {:.4}+{:.2} (lower est {})",
            if pass { "PASS" } else { "FAIL" },
            cert.pass,
            upper_slope,
            target,
            self.tol,
            lower_slope.map_or("n/a".into(), |s| format!("{s:.4}")),
        );
        Ok(pass)
    }
}

// ---------------------------------------------------------------------------
// jarvenpaa
// ---------------------------------------------------------------------------

#[derive(Args)]
struct Jarvenpaa {
    #[arg(long)]
    cloud: PathBuf,
    /// Projection arity (subset size).
    #[arg(long, default_value_t = 1)]
    n: usize,
    #[arg(long, default_value_t = 3)]
    q: u32,
    #[arg(long)]
    levels: String,
    #[arg(long, default_value_t = 0.05)]
    tol: f64,
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    common: CommonOut,
}

impl Jarvenpaa {
    fn run(self) -> CmdResult {
        let cloud = read_cloud(&self.cloud)?;
        let levels = parse_levels(&self.levels)?;
        let report = jarvenpaa_check(&cloud, self.n, self.q, &levels, self.tol)?;
        let json = serde_json::json!({
            "meta": meta_json("jarvenpaa", self.common.seed, !self.common.no_timestamp, &[
                ("q", self.q.into()),
                ("n", self.n.into()),
                ("levels", levels.clone().into()),
                ("tol", self.tol.into()),
                ("scale_sequence", "q-adic levels".into()),
            ]),
            "report": report,
        });
        if let Some(out) = &self.out {
            write_json(out, &json)?;
        }
        println!(
            "jarvenpaa: {} — margin {:.6}{} (best subset {:?})",
            if report.pass { "PASS" } else { "FAIL" },
            report.margin,
            report
                .margin_exact
                .as_ref()
                .map(|m| format!(" (exact {m})"))
                .unwrap_or_default(),
            report.best_subset
        );
        Ok(report.pass)
    }
}

// ---------------------------------------------------------------------------
// transversality-report
// ---------------------------------------------------------------------------

#[derive(Args)]
struct TransversalityReport {
    #[arg(long)]
    norm: PathBuf,
    /// Pins `x,y;x,y` for the gradient-volume section.
    #[arg(long, allow_hyphen_values = true)]
    pins: Option<String>,
    /// Cloud over which volumes are evaluated (subsampled to 10k points).
    #[arg(long)]
    cloud: Option<PathBuf>,
    /// Scales for the gradient-modulus table.
    #[arg(long, default_value = "0.1,0.01,0.001")]
    eps: String,
    #[arg(long, default_value_t = 20_000)]
    budget: u64,
    /// Duality residual tolerance.
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    common: CommonOut,
}

impl TransversalityReport {
    fn run(self) -> CmdResult {
        let norm = read_norm(&self.norm)?;
        let d = norm.dim();
        let mut pass = true;
        let mut sections = serde_json::Map::new();

        if let Some(smooth) = norm.as_smooth() {
            let lambda = lambda_constant(smooth);
            let eta = direction_eta(smooth);
            let rng = CounterRng::new(self.common.seed).stream(0xD17);
            let mut inside = 0usize;
            let trials = 1000u64;
            for i in 0..trials {
                let z = rng.unit_vector_at(i, d);
                let g = smooth.gradient(&z)?;
                let cone = ConeSpec::around_direction(vec![0.0; d], &g, eta)?;
                if cone.contains(&z)? {
                    inside += 1;
                }
            }
            let direction_ok = inside as u64 == trials;
            pass &= direction_ok;
            let mut max_pairing = 0.0f64;
            let mut max_norm_res = 0.0f64;
            for i in 0..1000u64 {
                let mut x = rng.unit_vector_at(trials + i, d);
                let scale = 0.5 + 1.5 * rng.f64_at(trials + i);
                for c in x.iter_mut() {
                    *c *= scale;
                }
                let r = duality_check(smooth, &x, self.tol)?;
                max_pairing = max_pairing.max(r.pairing_residual);
                max_norm_res = max_norm_res.max(r.norm_residual);
            }
            let duality_ok = max_pairing <= self.tol && max_norm_res <= self.tol;
            pass &= duality_ok;
            let h_table: Vec<serde_json::Value> = parse_deltas(&self.eps)?
                .into_iter()
                .map(|e| {
                    let h = modulus_h(smooth, e, self.budget);
                    serde_json::json!({"eps": e, "h": h, "ratio": h / e})
                })
                .collect();
            sections.insert(
                "smooth".into(),
                serde_json::json!({
                    "lambda": lambda,
                    "eta": eta,
                    "direction_membership": {"tested": trials, "inside": inside, "pass": direction_ok},
                    "duality": {"max_pairing_residual": max_pairing, "max_norm_residual": max_norm_res, "tol": self.tol, "pass": duality_ok},
                    "modulus_h": h_table,
                }),
            );
        }

        if let (Some(pins_s), Some(cloud_path)) = (&self.pins, &self.cloud) {
            let pins = parse_points(pins_s, d)?;
            let cloud = read_cloud(cloud_path)?.to_float();
            let n = cloud.len().min(10_000);
            let mut min_vol = f64::INFINITY;
            let mut sum = 0.0;
            let mut ok = 0usize;
            let mut errors = 0usize;
            for i in 0..n {
                let x = cloud.point_f64(i);
                match transversality_volume(&norm, &x, &pins) {
                    Ok(v) => {
                        min_vol = min_vol.min(v);
                        sum += v;
                        ok += 1;
                    }
                    Err(_) => errors += 1,
                }
            }
            sections.insert(
                "volumes".into(),
                serde_json::json!({
                    "pins": pins,
                    "evaluated": ok,
                    "errors": errors,
                    "min": if ok > 0 { Some(min_vol) } else { None },
                    "mean": if ok > 0 { Some(sum / ok as f64) } else { None },
                }),
            );
        }

        let report = serde_json::json!({
            "meta": meta_json("transversality-report", self.common.seed, !self.common.no_timestamp, &[
                ("tol", self.tol.into()),
                ("budget", self.budget.into()),
                ("norm", norm.describe().into()),
            ]),
            "sections": sections,
            "pass": pass,
        });
        if let Some(out) = &self.out {
            write_json(out, &report)?;
        }
        println!(
            "transversality-report: {}",
            if pass { "PASS" } else { "FAIL" }
        );
        Ok(pass)
    }
}

// ---------------------------------------------------------------------------
// fiber-scan
// ---------------------------------------------------------------------------

#[derive(Args)]
struct FiberScan {
    #[arg(long)]
    norm: PathBuf,
    /// Pins `x,y;x,y`.
    #[arg(long, allow_hyphen_values = true)]
    pins: String,
    /// Cloud CSV; or use --grid.
    #[arg(long)]
    cloud: Option<PathBuf>,
    /// Synthesize an NxN grid cloud on [0,1]^2.
    #[arg(long)]
    grid: Option<usize>,
    /// Scales, e.g. `2^-5,2^-6,2^-7,2^-8,2^-9,2^-10`.
    #[arg(long)]
    deltas: String,
    /// Image targets sampled per scale (plus adversarial corners).
    #[arg(long, default_value_t = 32)]
    xi: usize,
    /// Fail (exit 2) when the fitted exponent exceeds this.
    #[arg(long)]
    max_exponent: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    common: CommonOut,
}

impl FiberScan {
    fn run(self) -> CmdResult {
        let norm = read_norm(&self.norm)?;
        let cloud = match (&self.cloud, self.grid) {
            (Some(path), None) => read_cloud(path)?.to_float(),
            (None, Some(n)) => {
                if norm.dim() != 2 {
                    return Err("--grid builds 2-dimensional clouds only".into());
                }
                if n < 2 {
                    return Err("--grid needs at least 2 cells per side".into());
                }
                let mut coords = Vec::with_capacity(n * n * 2);
                for i in 0..n {
                    for j in 0..n {
                        coords.push(i as f64 / (n - 1) as f64);
                        coords.push(j as f64 / (n - 1) as f64);
                    }
                }
                PointCloud::from_f64(2, coords)?
            }
            _ => return Err("give exactly one of --cloud or --grid".into()),
        };
        let pins = parse_points(&self.pins, norm.dim())?;
        let family = ProjectionFamily::new(pins, norm.clone())?;
        let deltas = parse_deltas(&self.deltas)?;
        let scan = weak_transversality_scan(&family, &cloud, &deltas, self.xi, self.common.seed)?;
        let pass = self.max_exponent.is_none_or(|g| scan.exponent <= g);
        let report = serde_json::json!({
            "meta": meta_json("fiber-scan", self.common.seed, !self.common.no_timestamp, &[
                ("deltas", deltas.clone().into()),
                ("xi_samples", self.xi.into()),
                ("max_exponent", self.max_exponent.into()),
                ("norm", norm.describe().into()),
            ]),
            "scan": scan,
            "pass": pass,
        });
        if let Some(out) = &self.out {
            write_json(out, &report)?;
        }
        println!(
            "fiber-scan: {} — exponent {:.4} over {} scales",
            if pass { "PASS" } else { "FAIL" },
            scan.exponent,
            deltas.len()
        );
        Ok(pass)
    }
}
