//! Static SVG figures written directly from CSV tables.

use super::table::CsvData;
use super::HarnessError;
use std::collections::BTreeMap;
use std::fmt::Write;
use std::str::FromStr;

const W: f64 = 640.0;
const H: f64 = 420.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 50.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotKind {
    /// Error against the model parameter with a CI band, one curve per `n`.
    PhaseDiagram,
    /// Finite-`n` errors as points with the ODE value as a reference line per rate.
    MleVsOde,
    /// Limit error against the rate.
    OdeCurve,
}

impl FromStr for PlotKind {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "phase_diagram" => Ok(PlotKind::PhaseDiagram),
            "mle_vs_ode" => Ok(PlotKind::MleVsOde),
            "ode_curve" | "ode" => Ok(PlotKind::OdeCurve),
            _ => Err(HarnessError::Config(format!("unknown plot kind '{s}'"))),
        }
    }
}

struct Series {
    label: String,
    points: Vec<(f64, f64)>,
    band: Option<Vec<(f64, f64, f64)>>,
    line: bool,
    dashed: bool,
}

struct Frame {
    x: (f64, f64),
    y: (f64, f64),
}

impl Frame {
    fn new(series: &[Series]) -> Self {
        let mut xs: Vec<f64> = Vec::new();
        let mut ys: Vec<f64> = Vec::new();
        for s in series {
            for &(x, y) in &s.points {
                xs.push(x);
                ys.push(y);
            }
            for &(_, lo, hi) in s.band.iter().flatten() {
                ys.push(lo);
                ys.push(hi);
            }
        }
        let range = |v: &[f64], dflt: (f64, f64)| {
            let v: Vec<f64> = v.iter().copied().filter(|a| a.is_finite()).collect();
            if v.is_empty() {
                return dflt;
            }
            let (lo, hi) = v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
            if hi > lo {
                let pad = 0.05 * (hi - lo);
                (lo - pad, hi + pad)
            } else {
                (lo - 0.5, hi + 0.5)
            }
        };
        Frame { x: range(&xs, (0.0, 1.0)), y: range(&ys, (0.0, 1.0)) }
    }

    fn px(&self, x: f64) -> f64 {
        LEFT + (x - self.x.0) / (self.x.1 - self.x.0) * (W - LEFT - RIGHT)
    }

    fn py(&self, y: f64) -> f64 {
        H - BOTTOM - (y - self.y.0) / (self.y.1 - self.y.0) * (H - TOP - BOTTOM)
    }
}

fn render(title: &str, xlabel: &str, ylabel: &str, series: &[Series]) -> String {
    let f = Frame::new(series);
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#);
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="18" text-anchor="middle" font-family="sans-serif" font-size="14">{}</text>"#, W / 2.0, esc(title));
    let (x0, x1, y0, y1) = (LEFT, W - RIGHT, TOP, H - BOTTOM);
    let _ = writeln!(s, r#"<path d="M{x0} {y0} L{x0} {y1} L{x1} {y1}" fill="none" stroke="black"/>"#);
    for k in 0..=4 {
        let t = k as f64 / 4.0;
        let xv = f.x.0 + t * (f.x.1 - f.x.0);
        let yv = f.y.0 + t * (f.y.1 - f.y.0);
        let (px, py) = (f.px(xv), f.py(yv));
        let _ = writeln!(s, r#"<path d="M{px:.2} {y1} L{px:.2} {:.2}" stroke="black"/>"#, y1 + 5.0);
        let _ = writeln!(s, r#"<text x="{px:.2}" y="{:.2}" text-anchor="middle" font-family="sans-serif" font-size="11">{}</text>"#, y1 + 18.0, tick(xv));
        let _ = writeln!(s, r#"<path d="M{:.2} {py:.2} L{x0} {py:.2}" stroke="black"/>"#, x0 - 5.0);
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="end" font-family="sans-serif" font-size="11">{}</text>"#, x0 - 8.0, py + 4.0, tick(yv));
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle" font-family="sans-serif" font-size="12">{}</text>"#, (x0 + x1) / 2.0, H - 10.0, esc(xlabel));
    let _ = writeln!(s, r#"<text x="16" y="{}" text-anchor="middle" font-family="sans-serif" font-size="12" transform="rotate(-90 16 {})">{}</text>"#, (y0 + y1) / 2.0, (y0 + y1) / 2.0, esc(ylabel));
    for (k, ser) in series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        if let Some(band) = &ser.band {
            let pts: Vec<&(f64, f64, f64)> = band.iter().filter(|b| b.1.is_finite() && b.2.is_finite()).collect();
            if pts.len() >= 2 {
                let mut d = String::new();
                for (i, &&(x, _, hi)) in pts.iter().enumerate() {
                    let _ = write!(d, "{}{:.2} {:.2} ", if i == 0 { "M" } else { "L" }, f.px(x), f.py(hi));
                }
                for &&(x, lo, _) in pts.iter().rev() {
                    let _ = write!(d, "L{:.2} {:.2} ", f.px(x), f.py(lo));
                }
                let _ = writeln!(s, r#"<path d="{}Z" fill="{color}" fill-opacity="0.2" stroke="none"/>"#, d);
            }
        }
        let pts: Vec<(f64, f64)> = ser.points.iter().copied().filter(|p| p.0.is_finite() && p.1.is_finite()).collect();
        if ser.line && pts.len() >= 2 {
            let mut d = String::new();
            for (i, &(x, y)) in pts.iter().enumerate() {
                let _ = write!(d, "{}{:.2} {:.2} ", if i == 0 { "M" } else { "L" }, f.px(x), f.py(y));
            }
            let dash = if ser.dashed { r#" stroke-dasharray="6 4""# } else { "" };
            let _ = writeln!(s, r#"<path d="{}" fill="none" stroke="{color}" stroke-width="1.5"{dash}/>"#, d.trim_end());
        }
        if !ser.dashed {
            for &(x, y) in &pts {
                let _ = writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{color}"/>"#, f.px(x), f.py(y));
            }
        }
        let ly = TOP + 14.0 * (k as f64 + 1.0);
        let _ = writeln!(s, r#"<text x="{:.2}" y="{ly:.2}" font-family="sans-serif" font-size="11" fill="{color}">{}</text>"#, x1 - 150.0, esc(&ser.label));
    }
    s.push_str("</svg>\n");
    s
}

fn tick(v: f64) -> String {
    if v != 0.0 && (v.abs() < 1e-3 || v.abs() >= 1e4) {
        format!("{v:.2e}")
    } else {
        format!("{v:.3}")
    }
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn check_columns(data: &CsvData, cols: &[&str]) -> Result<(), HarnessError> {
    if data.header.is_empty() {
        return Ok(());
    }
    for c in cols {
        data.column(c)?;
    }
    Ok(())
}

/// SVG figure for a CSV produced by the matching experiment kind.
pub fn emit_plot(csv: &str, kind: PlotKind) -> Result<String, HarnessError> {
    let data = CsvData::parse(csv)?;
    let empty = data.header.is_empty();
    match kind {
        PlotKind::PhaseDiagram => {
            check_columns(&data, &["n", "param", "mean_error", "ci_low", "ci_high"])?;
            let mut by_n: BTreeMap<u64, Series> = BTreeMap::new();
            if !empty {
                let (n, p, m, lo, hi) =
                    (data.floats("n")?, data.floats("param")?, data.floats("mean_error")?, data.floats("ci_low")?, data.floats("ci_high")?);
                for k in 0..n.len() {
                    let s = by_n.entry(n[k] as u64).or_insert_with(|| Series {
                        label: format!("n = {}", n[k]),
                        points: Vec::new(),
                        band: Some(Vec::new()),
                        line: true,
                        dashed: false,
                    });
                    s.points.push((p[k], m[k]));
                    s.band.as_mut().expect("band").push((p[k], lo[k], hi[k]));
                }
            }
            let mut series: Vec<Series> = by_n.into_values().collect();
            for s in &mut series {
                let mut idx: Vec<usize> = (0..s.points.len()).collect();
                idx.sort_by(|&a, &b| s.points[a].0.total_cmp(&s.points[b].0));
                s.points = idx.iter().map(|&i| s.points[i]).collect();
                let band = s.band.take().expect("band");
                s.band = Some(idx.iter().map(|&i| band[i]).collect());
            }
            Ok(render("MLE reconstruction error", "param", "mean error", &series))
        }
        PlotKind::MleVsOde => {
            check_columns(&data, &["lambda", "n", "mean_error", "ode_error"])?;
            let mut series = Vec::new();
            if !empty {
                let (l, n, m, o) = (data.floats("lambda")?, data.floats("n")?, data.floats("mean_error")?, data.floats("ode_error")?);
                let mut lambdas: Vec<f64> = l.clone();
                lambdas.sort_by(f64::total_cmp);
                lambdas.dedup();
                let nmin = n.iter().copied().fold(f64::INFINITY, f64::min);
                let nmax = n.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                for lam in lambdas {
                    let rows: Vec<usize> = (0..l.len()).filter(|&k| l[k] == lam).collect();
                    series.push(Series {
                        label: format!("lambda = {lam} (MC)"),
                        points: rows.iter().map(|&k| (n[k], m[k])).collect(),
                        band: None,
                        line: false,
                        dashed: false,
                    });
                    let ode = o[rows[0]];
                    series.push(Series {
                        label: format!("lambda = {lam} (ODE)"),
                        points: vec![(nmin, ode), (nmax, ode)],
                        band: None,
                        line: true,
                        dashed: true,
                    });
                }
            }
            Ok(render("Finite n against the ODE limit", "n", "mean error", &series))
        }
        PlotKind::OdeCurve => {
            check_columns(&data, &["lambda", "error"])?;
            let mut series = Vec::new();
            if !empty {
                let mut pts: Vec<(f64, f64)> = data.floats("lambda")?.into_iter().zip(data.floats("error")?).collect();
                pts.sort_by(|a, b| a.0.total_cmp(&b.0));
                series.push(Series { label: "ODE limit".into(), points: pts, band: None, line: true, dashed: false });
            }
            Ok(render("Asymptotic MLE error", "lambda", "error", &series))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn phase_diagram_has_one_curve_per_n() {
        let csv = "model,n,param,trials,failures,mean_error,stderr,ci_low,ci_high,mean_objective,flagged\n\
                   u,100,0.5,3,0,0.1,0.01,0.08,0.12,0,false\n\
                   u,100,1.0,3,0,0.2,0.01,0.18,0.22,0,false\n\
                   u,200,0.5,3,0,0.05,0.01,0.03,0.07,0,false\n\
                   u,200,1.0,3,0,0.15,0.01,0.13,0.17,0,false\n";
        let svg = emit_plot(csv, PlotKind::PhaseDiagram).unwrap();
        assert!(svg.starts_with("<svg"));
        assert_eq!(svg.matches("fill-opacity").count(), 2);
        assert!(svg.contains("n = 100") && svg.contains("n = 200"));
    }

    #[test]
    fn empty_csv_gives_empty_axes() {
        let svg = emit_plot("", PlotKind::PhaseDiagram).unwrap();
        assert!(svg.contains("</svg>") && !svg.contains("<circle"));
    }

    #[test]
    fn mle_vs_ode_has_reference_line() {
        let csv = "lambda,n,trials,failures,mean_error,stderr,ode_error,rel_gap\n2,500,5,0,0.3,0.01,0.25,0.2\n2,1000,5,0,0.28,0.01,0.25,0.1\n";
        let svg = emit_plot(csv, PlotKind::MleVsOde).unwrap();
        assert_eq!(svg.matches("stroke-dasharray").count(), 1);
        assert_eq!(svg.matches("<circle").count(), 2);
    }

    #[test]
    fn schema_mismatch_is_an_error() {
        assert!(matches!(emit_plot("a,b\n1,2\n", PlotKind::OdeCurve), Err(HarnessError::Schema(_))));
    }
}
