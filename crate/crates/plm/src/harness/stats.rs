//! Summary statistics for trial aggregates.

const Z95: f64 = 1.959963984540054;

/// Mean, standard error and a 95% interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub count: usize,
    pub mean: f64,
    pub stderr: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

/// Summary of values in `[0, scale]`: a normal interval, or a Wilson interval
/// on `mean / scale` when the proportion is within 0.05 of 0 or 1 or the
/// sample variance vanishes.
pub fn summarize(values: &[f64], scale: f64) -> Summary {
    let k = values.len();
    if k == 0 {
        return Summary { count: 0, mean: f64::NAN, stderr: f64::NAN, ci_low: f64::NAN, ci_high: f64::NAN };
    }
    let kf = k as f64;
    let mean = values.iter().sum::<f64>() / kf;
    let var = if k > 1 { values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (kf - 1.0) } else { 0.0 };
    let stderr = (var / kf).sqrt();
    let p = mean / scale;
    let (ci_low, ci_high) = if !(0.05..=0.95).contains(&p) || var == 0.0 {
        let (lo, hi) = wilson(p.clamp(0.0, 1.0), kf);
        (lo * scale, hi * scale)
    } else {
        (mean - Z95 * stderr, mean + Z95 * stderr)
    };
    Summary { count: k, mean, stderr, ci_low, ci_high }
}

/// Wilson score interval for a proportion `p` observed over `k` trials.
pub fn wilson(p: f64, k: f64) -> (f64, f64) {
    let z2 = Z95 * Z95;
    let denom = 1.0 + z2 / k;
    let centre = (p + z2 / (2.0 * k)) / denom;
    let half = Z95 * (p * (1.0 - p) / k + z2 / (4.0 * k * k)).sqrt() / denom;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normal_and_wilson() {
        let s = summarize(&[0.4, 0.6, 0.5, 0.5], 2.0);
        assert!((s.mean - 0.5).abs() < 1e-15);
        assert!(s.ci_low < 0.5 && s.ci_high > 0.5);
        let z = summarize(&[0.0; 10], 2.0);
        assert_eq!(z.ci_low, 0.0);
        assert!(z.ci_high > 0.0 && z.ci_high < 1.0);
        let (lo, hi) = wilson(0.5, 100.0);
        assert!((lo - 0.4038).abs() < 1e-3 && (hi - 0.5962).abs() < 1e-3);
    }
}
