//! Weight distributions, log-likelihood ratios and divergences.
//!
//! Densities are taken with respect to Lebesgue measure plus counting measure
//! on atoms, so a continuous law has density zero at every atom and a discrete
//! law has density zero away from its atoms.

use crate::quad::{self, QuadConfig, QuadError};
use rand::Rng;
use rand_distr::{Distribution, Exp, StandardNormal};
use statrs::function::erf::{erf, erf_inv};
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

/// Densities below this are treated as zero when truncating supports.
const TAIL_DENSITY: f64 = 1e-16;
/// Quantile grid used to evaluate medians and tail fractions of the llr.
const QUANTILE_GRID: usize = 4097;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DistError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("parse error at position {position}: {message}")]
    Parse { position: usize, message: String },
    #[error(transparent)]
    Quadrature(#[from] QuadError),
}

#[derive(Debug, Clone, PartialEq)]
pub enum WeightDistribution {
    Exponential { rate: f64 },
    Uniform { lo: f64, hi: f64 },
    FoldedGaussian { variance: f64 },
    PointMass { atom: f64 },
    /// Sorted sample table; each entry carries mass 1/len.
    Empirical { table: Vec<f64> },
}

/// Value of a density at a point, tagged by the component of the dominating measure.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Density {
    Continuous(f64),
    Atom(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DivergenceReport {
    pub bhattacharyya: f64,
    pub alpha: f64,
    pub kl_pq: f64,
    pub kl_qp: f64,
}

/// Numerical settings shared by the divergence routines.
#[derive(Debug, Clone, Copy, PartialEq)]
#[derive(Default)]
pub struct DivergenceConfig {
    pub quad: QuadConfig,
    /// Histogram width used when an empirical law meets a continuous one.
    /// `None` treats the pair as mutually singular.
    pub empirical_bin_width: Option<f64>,
}


fn check(cond: bool, msg: &str) -> Result<(), DistError> {
    if cond {
        Ok(())
    } else {
        Err(DistError::InvalidParameter(msg.to_string()))
    }
}

impl WeightDistribution {
    pub fn exponential(rate: f64) -> Result<Self, DistError> {
        check(rate.is_finite() && rate > 0.0, "exponential rate must be positive and finite")?;
        Ok(WeightDistribution::Exponential { rate })
    }

    pub fn uniform(lo: f64, hi: f64) -> Result<Self, DistError> {
        check(lo.is_finite() && hi.is_finite() && lo < hi, "uniform requires finite lo < hi")?;
        Ok(WeightDistribution::Uniform { lo, hi })
    }

    pub fn folded_gaussian(variance: f64) -> Result<Self, DistError> {
        check(variance.is_finite() && variance > 0.0, "folded-Gaussian variance must be positive")?;
        Ok(WeightDistribution::FoldedGaussian { variance })
    }

    pub fn point_mass(atom: f64) -> Result<Self, DistError> {
        check(atom.is_finite(), "atom must be finite")?;
        Ok(WeightDistribution::PointMass { atom })
    }

    pub fn empirical(mut samples: Vec<f64>) -> Result<Self, DistError> {
        check(!samples.is_empty(), "empirical table must be nonempty")?;
        check(samples.iter().all(|x| x.is_finite()), "empirical samples must be finite")?;
        samples.sort_by(f64::total_cmp);
        Ok(WeightDistribution::Empirical { table: samples })
    }

    pub fn is_continuous(&self) -> bool {
        matches!(
            self,
            WeightDistribution::Exponential { .. }
                | WeightDistribution::Uniform { .. }
                | WeightDistribution::FoldedGaussian { .. }
        )
    }

    /// Closed support interval.
    pub fn support(&self) -> (f64, f64) {
        match self {
            WeightDistribution::Exponential { .. } | WeightDistribution::FoldedGaussian { .. } => {
                (0.0, f64::INFINITY)
            }
            WeightDistribution::Uniform { lo, hi } => (*lo, *hi),
            WeightDistribution::PointMass { atom } => (*atom, *atom),
            WeightDistribution::Empirical { table } => (table[0], table[table.len() - 1]),
        }
    }

    /// Point beyond which the density stays below the tail threshold.
    fn tail_point(&self) -> f64 {
        match self {
            WeightDistribution::Exponential { rate } => ((rate / TAIL_DENSITY).ln() / rate).max(0.0),
            WeightDistribution::FoldedGaussian { variance } => {
                let peak = (2.0 / (PI * variance)).sqrt();
                (2.0 * variance * (peak / TAIL_DENSITY).ln().max(0.0)).sqrt()
            }
            _ => self.support().1,
        }
    }

    /// Natural length scale, used to place quadrature breakpoints.
    fn scale(&self) -> f64 {
        match self {
            WeightDistribution::Exponential { rate } => 1.0 / rate,
            WeightDistribution::FoldedGaussian { variance } => variance.sqrt(),
            WeightDistribution::Uniform { lo, hi } => hi - lo,
            _ => 1.0,
        }
    }

    fn atom_mass(&self, x: f64) -> f64 {
        match self {
            WeightDistribution::PointMass { atom } => {
                if x == *atom {
                    1.0
                } else {
                    0.0
                }
            }
            WeightDistribution::Empirical { table } => {
                let lo = table.partition_point(|&t| t < x);
                let hi = table.partition_point(|&t| t <= x);
                (hi - lo) as f64 / table.len() as f64
            }
            _ => 0.0,
        }
    }

    fn lebesgue_density(&self, x: f64) -> f64 {
        match self {
            WeightDistribution::Exponential { rate } => {
                if x >= 0.0 {
                    rate * (-rate * x).exp()
                } else {
                    0.0
                }
            }
            WeightDistribution::Uniform { lo, hi } => {
                if x >= *lo && x <= *hi {
                    1.0 / (hi - lo)
                } else {
                    0.0
                }
            }
            WeightDistribution::FoldedGaussian { variance }
                if x >= 0.0 => {
                    (2.0 / (PI * variance)).sqrt() * (-x * x / (2.0 * variance)).exp()
                }
            _ => 0.0,
        }
    }

    pub fn density_at(&self, x: f64) -> Density {
        if self.is_continuous() {
            Density::Continuous(self.lebesgue_density(x))
        } else {
            Density::Atom(self.atom_mass(x))
        }
    }

    /// Density with respect to the dominating measure; atoms count as mass.
    pub fn density(&self, x: f64) -> f64 {
        match self.density_at(x) {
            Density::Continuous(v) | Density::Atom(v) => v,
        }
    }

    /// Log-density; `-inf` outside the support, never NaN.
    pub fn log_density(&self, x: f64) -> f64 {
        if x.is_nan() {
            return f64::NEG_INFINITY;
        }
        match self {
            WeightDistribution::Exponential { rate } => {
                if x >= 0.0 && x.is_finite() {
                    rate.ln() - rate * x
                } else {
                    f64::NEG_INFINITY
                }
            }
            WeightDistribution::FoldedGaussian { variance } => {
                if x >= 0.0 && x.is_finite() {
                    0.5 * (2.0 / (PI * variance)).ln() - x * x / (2.0 * variance)
                } else {
                    f64::NEG_INFINITY
                }
            }
            _ => self.density(x).ln(),
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match self {
            WeightDistribution::Exponential { rate } => {
                if x <= 0.0 {
                    0.0
                } else {
                    -(-rate * x).exp_m1()
                }
            }
            WeightDistribution::Uniform { lo, hi } => ((x - lo) / (hi - lo)).clamp(0.0, 1.0),
            WeightDistribution::FoldedGaussian { variance } => {
                if x <= 0.0 {
                    0.0
                } else {
                    erf(x / (2.0 * variance).sqrt())
                }
            }
            WeightDistribution::PointMass { atom } => {
                if x >= *atom {
                    1.0
                } else {
                    0.0
                }
            }
            WeightDistribution::Empirical { table } => {
                table.partition_point(|&t| t <= x) as f64 / table.len() as f64
            }
        }
    }

    /// Generalized inverse CDF, `u` in `[0, 1]`.
    pub fn quantile(&self, u: f64) -> f64 {
        let u = u.clamp(0.0, 1.0);
        match self {
            WeightDistribution::Exponential { rate } => -(-u).ln_1p() / rate,
            WeightDistribution::Uniform { lo, hi } => lo + u * (hi - lo),
            WeightDistribution::FoldedGaussian { variance } => {
                if u >= 1.0 {
                    f64::INFINITY
                } else {
                    (2.0 * variance).sqrt() * erf_inv(u)
                }
            }
            WeightDistribution::PointMass { atom } => *atom,
            WeightDistribution::Empirical { table } => {
                let k = ((u * table.len() as f64).ceil() as usize).clamp(1, table.len());
                table[k - 1]
            }
        }
    }

    pub fn mean(&self) -> f64 {
        match self {
            WeightDistribution::Exponential { rate } => 1.0 / rate,
            WeightDistribution::Uniform { lo, hi } => 0.5 * (lo + hi),
            WeightDistribution::FoldedGaussian { variance } => (2.0 * variance / PI).sqrt(),
            WeightDistribution::PointMass { atom } => *atom,
            WeightDistribution::Empirical { table } => table.iter().sum::<f64>() / table.len() as f64,
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            WeightDistribution::Exponential { rate } => Exp::new(*rate).expect("validated rate").sample(rng),
            WeightDistribution::Uniform { lo, hi } => lo + (hi - lo) * rng.random::<f64>(),
            WeightDistribution::FoldedGaussian { variance } => {
                let z: f64 = StandardNormal.sample(rng);
                (z * variance.sqrt()).abs()
            }
            WeightDistribution::PointMass { atom } => *atom,
            WeightDistribution::Empirical { table } => table[rng.random_range(0..table.len())],
        }
    }

    /// Law of `c * X` for `c > 0`.
    pub fn scaled(&self, c: f64) -> WeightDistribution {
        match self {
            WeightDistribution::Exponential { rate } => WeightDistribution::Exponential { rate: rate / c },
            WeightDistribution::Uniform { lo, hi } => WeightDistribution::Uniform { lo: lo * c, hi: hi * c },
            WeightDistribution::FoldedGaussian { variance } => {
                WeightDistribution::FoldedGaussian { variance: variance * c * c }
            }
            WeightDistribution::PointMass { atom } => WeightDistribution::PointMass { atom: atom * c },
            WeightDistribution::Empirical { table } => {
                WeightDistribution::Empirical { table: table.iter().map(|x| x * c).collect() }
            }
        }
    }

    /// Atoms of a discrete law with their masses.
    fn atoms(&self) -> Vec<(f64, f64)> {
        match self {
            WeightDistribution::PointMass { atom } => vec![(*atom, 1.0)],
            WeightDistribution::Empirical { table } => {
                let mut out: Vec<(f64, f64)> = Vec::new();
                let w = 1.0 / table.len() as f64;
                for &x in table {
                    match out.last_mut() {
                        Some((a, m)) if *a == x => *m += w,
                        _ => out.push((x, w)),
                    }
                }
                out
            }
            _ => Vec::new(),
        }
    }

    /// Piecewise-constant density for an empirical table binned at `width`.
    fn histogram(&self, width: f64) -> Option<(f64, Vec<f64>)> {
        let WeightDistribution::Empirical { table } = self else { return None };
        let origin = (table[0] / width).floor() * width;
        let bins = (((table[table.len() - 1] - origin) / width).floor() as usize) + 1;
        let mut h = vec![0.0; bins];
        let w = 1.0 / (table.len() as f64 * width);
        for &x in table {
            let k = (((x - origin) / width).floor() as usize).min(bins - 1);
            h[k] += w;
        }
        Some((origin, h))
    }
}

impl fmt::Display for WeightDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WeightDistribution::Exponential { rate } => write!(f, "exp:{rate:?}"),
            WeightDistribution::Uniform { lo, hi } => write!(f, "unif:{lo:?}:{hi:?}"),
            WeightDistribution::FoldedGaussian { variance } => write!(f, "fgauss:{variance:?}"),
            WeightDistribution::PointMass { atom } => write!(f, "point:{atom:?}"),
            WeightDistribution::Empirical { table } => write!(f, "empirical:{}", table.len()),
        }
    }
}

impl FromStr for WeightDistribution {
    type Err = DistError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lower = s.to_ascii_lowercase();
        let mut fields = Vec::new();
        let mut start = 0;
        for (i, c) in lower.char_indices() {
            if c == ':' {
                fields.push((start, &lower[start..i]));
                start = i + 1;
            }
        }
        fields.push((start, &lower[start..]));
        let (_, family) = fields[0];
        let arity = match family.trim() {
            "exp" | "fgauss" | "point" => 1,
            "unif" => 2,
            "" => return Err(DistError::Parse { position: 0, message: "missing family name".into() }),
            other => {
                return Err(DistError::Parse {
                    position: 0,
                    message: format!("unknown family '{other}' (expected exp, unif, fgauss or point)"),
                })
            }
        };
        if fields.len() - 1 != arity {
            let position = if fields.len() - 1 > arity { fields[arity + 1].0 - 1 } else { s.len() };
            return Err(DistError::Parse {
                position,
                message: format!("'{}' takes {} parameter(s), found {}", family.trim(), arity, fields.len() - 1),
            });
        }
        let mut nums = Vec::with_capacity(arity);
        for &(pos, text) in &fields[1..] {
            let v: f64 = text.trim().parse().map_err(|_| DistError::Parse {
                position: pos,
                message: format!("invalid number '{text}'"),
            })?;
            nums.push(v);
        }
        let built = match family.trim() {
            "exp" => WeightDistribution::exponential(nums[0]),
            "fgauss" => WeightDistribution::folded_gaussian(nums[0]),
            "point" => WeightDistribution::point_mass(nums[0]),
            _ => WeightDistribution::uniform(nums[0], nums[1]),
        };
        built.map_err(|e| DistError::Parse { position: fields[1].0, message: e.to_string() })
    }
}

/// Log-likelihood ratio `log f(w) - log g(w)`; `None` is a missing edge.
pub fn llr(p: &WeightDistribution, q: &WeightDistribution, w: Option<f64>) -> f64 {
    let Some(w) = w else { return f64::NEG_INFINITY };
    if w.is_nan() {
        return f64::NEG_INFINITY;
    }
    if p == q {
        return if p.density(w) > 0.0 { 0.0 } else { f64::NEG_INFINITY };
    }
    match (p.density_at(w), q.density_at(w)) {
        (Density::Continuous(_), Density::Continuous(_)) => {
            let lf = p.log_density(w);
            let lg = q.log_density(w);
            if lf == f64::NEG_INFINITY {
                f64::NEG_INFINITY
            } else if lg == f64::NEG_INFINITY {
                f64::INFINITY
            } else {
                lf - lg
            }
        }
        (Density::Atom(mp), Density::Atom(mq)) => {
            if mp == 0.0 {
                f64::NEG_INFINITY
            } else if mq == 0.0 {
                f64::INFINITY
            } else {
                mp.ln() - mq.ln()
            }
        }
        (Density::Atom(mp), Density::Continuous(_)) => {
            if mp > 0.0 {
                f64::INFINITY
            } else {
                f64::NEG_INFINITY
            }
        }
        (Density::Continuous(f), Density::Atom(mq)) => {
            if mq > 0.0 || f == 0.0 {
                f64::NEG_INFINITY
            } else {
                f64::INFINITY
            }
        }
    }
}

/// Sums `∫ f` over `[a, b]` splitting at geometric breakpoints above `a + s`,
/// so that narrow peaks near the origin are not missed on long intervals.
fn integrate_multiscale<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    s: f64,
    cfg: &QuadConfig,
) -> Result<f64, QuadError> {
    let mut cuts = vec![a];
    let mut step = s.max(f64::MIN_POSITIVE);
    while a + step < b {
        cuts.push(a + step);
        step *= 4.0;
    }
    cuts.push(b);
    let pieces = (cuts.len() - 1) as f64;
    let sub = QuadConfig { abs_tol: cfg.abs_tol / pieces, ..*cfg };
    let mut total = 0.0;
    for w in cuts.windows(2) {
        total += quad::integrate(&f, w[0], w[1], &sub)?;
    }
    Ok(total)
}

fn continuous_overlap(p: &WeightDistribution, q: &WeightDistribution) -> Option<(f64, f64, f64)> {
    let (pa, pb) = p.support();
    let (qa, qb) = q.support();
    let a = pa.max(qa);
    let mut b = pb.min(qb);
    if b.is_infinite() {
        b = p.tail_point().max(q.tail_point());
    }
    if b <= a {
        return None;
    }
    Some((a, b, 0.25 * p.scale().min(q.scale())))
}

/// Bhattacharyya coefficient by quadrature, bypassing closed forms.
pub fn bhattacharyya_numeric(
    p: &WeightDistribution,
    q: &WeightDistribution,
    cfg: &DivergenceConfig,
) -> Result<f64, DistError> {
    if p.is_continuous() && q.is_continuous() {
        let Some((a, b, s)) = continuous_overlap(p, q) else { return Ok(0.0) };
        let v = integrate_multiscale(
            |x| (p.lebesgue_density(x) * q.lebesgue_density(x)).sqrt(),
            a,
            b,
            s,
            &cfg.quad,
        )?;
        return Ok(v.clamp(0.0, 1.0));
    }
    if !p.is_continuous() && !q.is_continuous() {
        let qa = q.atoms();
        let v: f64 = p
            .atoms()
            .iter()
            .map(|&(x, m)| qa.iter().filter(|&&(y, _)| y == x).map(|&(_, mq)| (m * mq).sqrt()).sum::<f64>())
            .sum();
        return Ok(v.clamp(0.0, 1.0));
    }
    let (emp, cont) = if p.is_continuous() { (q, p) } else { (p, q) };
    match (cfg.empirical_bin_width, emp.histogram(cfg.empirical_bin_width.unwrap_or(1.0))) {
        (Some(width), Some((origin, h))) => {
            let mut total = 0.0;
            for (k, &hk) in h.iter().enumerate() {
                if hk == 0.0 {
                    continue;
                }
                let a = origin + k as f64 * width;
                total += quad::integrate(|x| (hk * cont.lebesgue_density(x)).sqrt(), a, a + width, &cfg.quad)?;
            }
            Ok(total.clamp(0.0, 1.0))
        }
        _ => Ok(0.0),
    }
}

/// `∫ sqrt(f g) dμ`, clamped to `[0, 1]`.
pub fn bhattacharyya(p: &WeightDistribution, q: &WeightDistribution, cfg: &DivergenceConfig) -> Result<f64, DistError> {
    if p == q {
        return Ok(1.0);
    }
    match (p, q) {
        (WeightDistribution::Exponential { rate: a }, WeightDistribution::Exponential { rate: b }) => {
            Ok((2.0 * (a * b).sqrt() / (a + b)).clamp(0.0, 1.0))
        }
        (WeightDistribution::Uniform { lo: l1, hi: h1 }, WeightDistribution::Uniform { lo: l2, hi: h2 }) => {
            let overlap = (h1.min(*h2) - l1.max(*l2)).max(0.0);
            Ok((overlap / ((h1 - l1) * (h2 - l2)).sqrt()).clamp(0.0, 1.0))
        }
        _ => bhattacharyya_numeric(p, q, cfg),
    }
}

/// Rényi divergence of order one half, `-2 log B`.
pub fn alpha(p: &WeightDistribution, q: &WeightDistribution, cfg: &DivergenceConfig) -> Result<f64, DistError> {
    let b = bhattacharyya(p, q, cfg)?;
    Ok(if b > 0.0 { (-2.0 * b.ln()).max(0.0) } else { f64::INFINITY })
}

/// `KL(p || q)` by quadrature, bypassing closed forms.
pub fn kl_numeric(p: &WeightDistribution, q: &WeightDistribution, cfg: &DivergenceConfig) -> Result<f64, DistError> {
    if p.is_continuous() != q.is_continuous() {
        return Ok(f64::INFINITY);
    }
    if !p.is_continuous() {
        let mut total = 0.0;
        for (x, m) in p.atoms() {
            let mq = q.atom_mass(x);
            if mq == 0.0 {
                return Ok(f64::INFINITY);
            }
            total += m * (m / mq).ln();
        }
        return Ok(total.max(0.0));
    }
    let (pa, pb) = p.support();
    let (qa, qb) = q.support();
    if pa < qa || pb > qb {
        return Ok(f64::INFINITY);
    }
    let b = if pb.is_infinite() { p.tail_point() } else { pb };
    let v = integrate_multiscale(
        |x| {
            let lf = p.log_density(x);
            if lf == f64::NEG_INFINITY {
                0.0
            } else {
                lf.exp() * (lf - q.log_density(x))
            }
        },
        pa,
        b,
        0.25 * p.scale(),
        &cfg.quad,
    )?;
    Ok(v.max(0.0))
}

/// Kullback–Leibler divergence `KL(p || q)`.
pub fn kl(p: &WeightDistribution, q: &WeightDistribution, cfg: &DivergenceConfig) -> Result<f64, DistError> {
    if p == q {
        return Ok(0.0);
    }
    match (p, q) {
        (WeightDistribution::Exponential { rate: a }, WeightDistribution::Exponential { rate: b }) => {
            Ok(((a / b).ln() + b / a - 1.0).max(0.0))
        }
        (WeightDistribution::Uniform { lo: l1, hi: h1 }, WeightDistribution::Uniform { lo: l2, hi: h2 }) => {
            if l1 >= l2 && h1 <= h2 {
                Ok(((h2 - l2) / (h1 - l1)).ln())
            } else {
                Ok(f64::INFINITY)
            }
        }
        _ => kl_numeric(p, q, cfg),
    }
}

pub fn divergences(
    p: &WeightDistribution,
    q: &WeightDistribution,
    cfg: &DivergenceConfig,
) -> Result<DivergenceReport, DistError> {
    let b = bhattacharyya(p, q, cfg)?;
    Ok(DivergenceReport {
        bhattacharyya: b,
        alpha: if b > 0.0 { (-2.0 * b.ln()).max(0.0) } else { f64::INFINITY },
        kl_pq: kl(p, q, cfg)?,
        kl_qp: kl(q, p, cfg)?,
    })
}

/// `sqrt(d) B(p, q) - 1`; negative below the recovery threshold.
pub fn threshold_margin(
    d: f64,
    p: &WeightDistribution,
    q: &WeightDistribution,
    cfg: &DivergenceConfig,
) -> Result<f64, DistError> {
    if !(d > 0.0) {
        return Err(DistError::InvalidParameter("mean degree must be positive".into()));
    }
    Ok(d.sqrt() * bhattacharyya(p, q, cfg)? - 1.0)
}

/// Planted rate `lambda > 1` at which `sqrt(n) B(Exp(lambda), Exp(1/n)) = 1`, by bisection.
pub fn exponential_threshold_rate(n: usize, cfg: &DivergenceConfig) -> Result<f64, DistError> {
    if n < 2 {
        return Err(DistError::InvalidParameter("n must be at least 2".into()));
    }
    let q = WeightDistribution::Exponential { rate: 1.0 / n as f64 };
    let f = |lambda: f64| -> Result<f64, DistError> {
        Ok((n as f64).sqrt() * bhattacharyya(&WeightDistribution::Exponential { rate: lambda }, &q, cfg)? - 1.0)
    };
    let (mut lo, mut hi) = (1.0, 64.0);
    if f(lo)? <= 0.0 || f(hi)? >= 0.0 {
        return Err(DistError::InvalidParameter(format!("no threshold crossing in [1, 64] at n = {n}")));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid)? > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-14 * hi {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Large-deviation bound `exp(-l (alpha + x/2))`.
pub fn ld_tail_bound(
    p: &WeightDistribution,
    q: &WeightDistribution,
    x: f64,
    ell: u32,
    cfg: &DivergenceConfig,
) -> Result<f64, DistError> {
    if !(x >= 0.0) {
        return Err(DistError::InvalidParameter("x must be nonnegative".into()));
    }
    let a = alpha(p, q, cfg)?;
    if a.is_infinite() {
        return Ok(0.0);
    }
    Ok((-(ell as f64) * (a + 0.5 * x)).exp())
}

fn llr_grid(p: &WeightDistribution, q: &WeightDistribution, under: &WeightDistribution) -> Vec<f64> {
    let mut v: Vec<f64> = (0..QUANTILE_GRID)
        .map(|i| llr(p, q, Some(under.quantile((i as f64 + 0.5) / QUANTILE_GRID as f64))))
        .collect();
    v.sort_by(f64::total_cmp);
    v
}

/// Median of `llr(W)` for `W ~ under`, by quantile inversion on a fixed grid.
pub fn llr_median(p: &WeightDistribution, q: &WeightDistribution, under: &WeightDistribution) -> f64 {
    llr_grid(p, q, under)[QUANTILE_GRID / 2]
}

/// `P(llr(W) >= tau)` for `W ~ under`, on the same quantile grid.
pub fn llr_upper_fraction(p: &WeightDistribution, q: &WeightDistribution, under: &WeightDistribution, tau: f64) -> f64 {
    let g = llr_grid(p, q, under);
    (g.len() - g.partition_point(|&v| v < tau)) as f64 / g.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::from_seed;

    fn cfg() -> DivergenceConfig {
        DivergenceConfig::default()
    }

    #[test]
    fn densities_integrate_to_one() {
        let c = QuadConfig::default();
        for d in [
            WeightDistribution::exponential(3.0).unwrap(),
            WeightDistribution::uniform(-1.0, 2.5).unwrap(),
            WeightDistribution::folded_gaussian(0.7).unwrap(),
        ] {
            let (a, b) = d.support();
            let b = if b.is_infinite() { d.tail_point() } else { b };
            let v = integrate_multiscale(|x| d.lebesgue_density(x), a, b, 0.25 * d.scale(), &c).unwrap();
            assert!((v - 1.0).abs() < 1e-8, "{d}: {v}");
        }
    }

    #[test]
    fn exponential_closed_forms() {
        let p = WeightDistribution::exponential(2.0).unwrap();
        let q = WeightDistribution::exponential(0.5).unwrap();
        let b = bhattacharyya(&p, &q, &cfg()).unwrap();
        assert!((b - 2.0 * 1.0f64.sqrt() / 2.5).abs() < 1e-15);
        let k = kl(&p, &q, &cfg()).unwrap();
        assert!((k - ((4.0f64).ln() + 0.25 - 1.0)).abs() < 1e-14);
        let kn = kl_numeric(&p, &q, &cfg()).unwrap();
        assert!((k - kn).abs() < 1e-8);
    }

    #[test]
    fn identical_laws() {
        let p = WeightDistribution::exponential(2.0).unwrap();
        let r = divergences(&p, &p, &cfg()).unwrap();
        assert_eq!(r, DivergenceReport { bhattacharyya: 1.0, alpha: 0.0, kl_pq: 0.0, kl_qp: 0.0 });
    }

    #[test]
    fn disjoint_uniforms() {
        let p = WeightDistribution::uniform(0.0, 1.0).unwrap();
        let q = WeightDistribution::uniform(2.0, 3.0).unwrap();
        let r = divergences(&p, &q, &cfg()).unwrap();
        assert_eq!(r.bhattacharyya, 0.0);
        assert_eq!(r.alpha, f64::INFINITY);
        assert_eq!(r.kl_pq, f64::INFINITY);
    }

    #[test]
    fn mixed_point_and_continuous_is_singular() {
        let p = WeightDistribution::point_mass(1.0).unwrap();
        let q = WeightDistribution::exponential(1.0).unwrap();
        assert_eq!(bhattacharyya(&p, &q, &cfg()).unwrap(), 0.0);
        assert_eq!(llr(&p, &q, Some(1.0)), f64::INFINITY);
        assert_eq!(llr(&q, &p, Some(1.0)), f64::NEG_INFINITY);
        assert_eq!(llr(&q, &p, Some(2.0)), f64::INFINITY);
    }

    #[test]
    fn folded_gaussian_pair_matches_closed_form() {
        // B of two half-normals with variances s, t is sqrt(2 sqrt(st)/(s+t))
        let p = WeightDistribution::folded_gaussian(1.0).unwrap();
        let q = WeightDistribution::folded_gaussian(4.0).unwrap();
        let b = bhattacharyya(&p, &q, &cfg()).unwrap();
        assert!((b - (2.0 * 2.0f64 / 5.0).sqrt()).abs() < 1e-9);
    }

    #[test]
    fn llr_exponential_model_form() {
        let n = 1000.0;
        let lam = 3.0;
        let p = WeightDistribution::exponential(lam).unwrap();
        let q = WeightDistribution::exponential(1.0 / n).unwrap();
        for w in [0.0, 0.3, 7.0, 250.0] {
            let expect = (n * lam).ln() - (lam - 1.0 / n) * w;
            assert!((llr(&p, &q, Some(w)) - expect).abs() < 1e-10);
        }
        assert_eq!(llr(&p, &q, None), f64::NEG_INFINITY);
        assert_eq!(llr(&p, &q, Some(-1.0)), f64::NEG_INFINITY);
        assert_eq!(llr(&p, &p, Some(1.5)), 0.0);
    }

    #[test]
    fn llr_never_nan() {
        let laws = [
            WeightDistribution::exponential(1.0).unwrap(),
            WeightDistribution::uniform(0.0, 1.0).unwrap(),
            WeightDistribution::folded_gaussian(1.0).unwrap(),
            WeightDistribution::point_mass(1.0).unwrap(),
            WeightDistribution::empirical(vec![0.5, 1.0, 1.0]).unwrap(),
        ];
        let ws = [None, Some(f64::NAN), Some(f64::INFINITY), Some(f64::NEG_INFINITY), Some(-1.0), Some(0.0), Some(1.0), Some(1e300)];
        for p in &laws {
            for q in &laws {
                for w in ws {
                    assert!(!llr(p, q, w).is_nan(), "{p} {q} {w:?}");
                }
            }
        }
    }

    #[test]
    fn threshold_margins() {
        let p = WeightDistribution::point_mass(1.0).unwrap();
        assert_eq!(threshold_margin(1.0, &p, &p, &cfg()).unwrap(), 0.0);
        assert_eq!(threshold_margin(4.0, &p, &p, &cfg()).unwrap(), 1.0);
    }

    #[test]
    fn exponential_threshold_near_four() {
        let r = exponential_threshold_rate(1_000_000, &cfg()).unwrap();
        assert!((r - 4.0).abs() < 1e-2, "{r}");
        assert!(exponential_threshold_rate(1, &cfg()).is_err());
    }

    #[test]
    fn ld_bound_cases() {
        let p = WeightDistribution::exponential(3.0).unwrap();
        let q = WeightDistribution::exponential(0.2).unwrap();
        let b = bhattacharyya(&p, &q, &cfg()).unwrap();
        assert!((ld_tail_bound(&p, &q, 0.0, 1, &cfg()).unwrap() - b * b).abs() < 1e-14);
        assert!((ld_tail_bound(&p, &p, 0.4, 5, &cfg()).unwrap() - (-1.0f64).exp()).abs() < 1e-15);
        let u = WeightDistribution::uniform(0.0, 1.0).unwrap();
        let v = WeightDistribution::uniform(2.0, 3.0).unwrap();
        assert_eq!(ld_tail_bound(&u, &v, 0.0, 3, &cfg()).unwrap(), 0.0);
    }

    #[test]
    fn parse_grammar() {
        assert_eq!("EXP:2.5".parse::<WeightDistribution>().unwrap(), WeightDistribution::Exponential { rate: 2.5 });
        assert_eq!("unif:-1:1".parse::<WeightDistribution>().unwrap(), WeightDistribution::Uniform { lo: -1.0, hi: 1.0 });
        assert_eq!("Point:1".parse::<WeightDistribution>().unwrap(), WeightDistribution::PointMass { atom: 1.0 });
        match "unif:0:x".parse::<WeightDistribution>() {
            Err(DistError::Parse { position, .. }) => assert_eq!(position, 7),
            other => panic!("{other:?}"),
        }
        match "gamma:1".parse::<WeightDistribution>() {
            Err(DistError::Parse { position, .. }) => assert_eq!(position, 0),
            other => panic!("{other:?}"),
        }
        match "exp:1:2".parse::<WeightDistribution>() {
            Err(DistError::Parse { position, .. }) => assert_eq!(position, 5),
            other => panic!("{other:?}"),
        }
        assert!("exp:-1".parse::<WeightDistribution>().is_err());
        for d in ["exp:0.1", "unif:0.5:2", "fgauss:3", "point:1"] {
            let w: WeightDistribution = d.parse().unwrap();
            assert_eq!(w.to_string().parse::<WeightDistribution>().unwrap(), w);
        }
    }

    #[test]
    fn quantile_inverts_cdf() {
        for d in [
            WeightDistribution::exponential(0.3).unwrap(),
            WeightDistribution::uniform(1.0, 4.0).unwrap(),
            WeightDistribution::folded_gaussian(2.0).unwrap(),
        ] {
            for u in [0.01, 0.3, 0.5, 0.9] {
                assert!((d.cdf(d.quantile(u)) - u).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn sampling_is_deterministic() {
        let d = WeightDistribution::folded_gaussian(2.0).unwrap();
        let a: Vec<f64> = { let mut r = from_seed(3); (0..5).map(|_| d.sample(&mut r)).collect() };
        let b: Vec<f64> = { let mut r = from_seed(3); (0..5).map(|_| d.sample(&mut r)).collect() };
        assert_eq!(a, b);
    }

    #[test]
    fn empirical_binning_knob() {
        let mut r = from_seed(1);
        let e = WeightDistribution::exponential(1.0).unwrap();
        let table: Vec<f64> = (0..20000).map(|_| e.sample(&mut r)).collect();
        let emp = WeightDistribution::empirical(table).unwrap();
        assert_eq!(bhattacharyya(&emp, &e, &cfg()).unwrap(), 0.0);
        let binned = DivergenceConfig { empirical_bin_width: Some(0.1), ..cfg() };
        let b = bhattacharyya(&emp, &e, &binned).unwrap();
        assert!(b > 0.98 && b <= 1.0, "{b}");
    }

    #[test]
    fn median_of_exponential_llr() {
        let n = 100.0;
        let lam = 3.0;
        let p = WeightDistribution::exponential(lam).unwrap();
        let q = WeightDistribution::exponential(1.0 / n).unwrap();
        let med = llr_median(&p, &q, &p);
        let expect = (n * lam).ln() - (lam - 1.0 / n) * (2.0f64.ln() / lam);
        assert!((med - expect).abs() < 1e-9);
    }
}
