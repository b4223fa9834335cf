//! CSV and SVG emitters. Numbers are printed with 15 significant digits.

use std::fmt::Write as _;

use qpcubic::{ScanRow, Stability};

pub fn num(v: f64) -> String {
    format!("{v:.14e}")
}

pub fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

/// Comma-separated table with a header row.
pub struct Csv {
    text: String,
    width: usize,
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        Csv {
            text: header.join(",") + "\n",
            width: header.len(),
        }
    }

    pub fn row<S: AsRef<str>>(&mut self, cells: &[S]) {
        debug_assert_eq!(cells.len(), self.width);
        let line: Vec<&str> = cells.iter().map(AsRef::as_ref).collect();
        self.text.push_str(&line.join(","));
        self.text.push('\n');
    }

    pub fn finish(self) -> String {
        self.text
    }
}

fn stability(s: Option<Stability>) -> &'static str {
    match s {
        Some(Stability::Attractive) => "attractive",
        Some(Stability::Repulsive) => "repulsive",
        Some(Stability::Undetermined) => "undetermined",
        None => "",
    }
}

fn quote(s: &str) -> String {
    format!("\"{}\"", s.replace('"', "\"\""))
}

pub fn scan_csv(rows: &[ScanRow]) -> String {
    let mut csv = Csv::new(&[
        "epsilon", "count", "lower0", "middle0", "upper0", "sep_upper_middle",
        "sep_middle_lower", "sep_upper_lower", "lower_gamma_l", "lower_gamma_u",
        "middle_gamma_l", "middle_gamma_u", "upper_gamma_l", "upper_gamma_u",
        "lower_stability", "middle_stability", "upper_stability", "converged", "error",
    ]);
    for r in rows {
        let g = |b: &Option<qpcubic::LyapBounds>| {
            [opt(b.map(|b| b.gamma_l)), opt(b.map(|b| b.gamma_u))]
        };
        let [ll, lu] = g(&r.lyap_lower);
        let [ml, mu] = g(&r.lyap_middle);
        let [ul, uu] = g(&r.lyap_upper);
        csv.row(&[
            num(r.epsilon),
            r.count.to_string(),
            opt(r.lower0),
            opt(r.middle0),
            opt(r.upper0),
            opt(r.sep_upper_middle),
            opt(r.sep_middle_lower),
            opt(r.sep_upper_lower),
            ll, lu, ml, mu, ul, uu,
            stability(r.stability[0]).into(),
            stability(r.stability[1]).into(),
            stability(r.stability[2]).into(),
            r.converged.to_string(),
            r.error.as_deref().map(quote).unwrap_or_default(),
        ]);
    }
    csv.finish()
}

const W: f64 = 640.0;
const H: f64 = 420.0;
const MARGIN: f64 = 50.0;

fn ticks(lo: f64, hi: f64) -> Vec<f64> {
    (0..=4).map(|i| lo + (hi - lo) * i as f64 / 4.0).collect()
}

/// Bifurcation diagram: ε across, branch values at `t = 0` up. Attractive
/// stretches are solid, repulsive ones dashed and undetermined points circled.
pub fn scan_svg(rows: &[ScanRow]) -> String {
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .flat_map(|r| [r.lower0, r.middle0, r.upper0].into_iter().flatten().map(move |y| (r.epsilon, y)))
        .collect();
    let span = |it: &mut dyn Iterator<Item = f64>| {
        let (lo, hi) = it.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
        if !lo.is_finite() {
            (0.0, 1.0)
        } else if hi - lo < 1e-12 {
            (lo - 0.5, hi + 0.5)
        } else {
            (lo, hi)
        }
    };
    let (x_lo, x_hi) = span(&mut rows.iter().map(|r| r.epsilon));
    let (y_lo, y_hi) = span(&mut pts.iter().map(|p| p.1));
    let sx = |x: f64| MARGIN + (x - x_lo) / (x_hi - x_lo) * (W - 2.0 * MARGIN);
    let sy = |y: f64| H - MARGIN - (y - y_lo) / (y_hi - y_lo) * (H - 2.0 * MARGIN);

    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#);
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let (x0, y0, x1, y1) = (MARGIN, H - MARGIN, W - MARGIN, MARGIN);
    let _ = writeln!(s, r#"<path d="M{x0} {y1} L{x0} {y0} L{x1} {y0}" stroke="black" fill="none"/>"#);
    for t in ticks(x_lo, x_hi) {
        let x = sx(t);
        let _ = writeln!(
            s,
            r#"<line x1="{x:.2}" y1="{y0}" x2="{x:.2}" y2="{:.2}" stroke="black"/><text x="{x:.2}" y="{:.2}" font-size="10" text-anchor="middle">{t:.4}</text>"#,
            y0 + 5.0,
            y0 + 18.0
        );
    }
    for t in ticks(y_lo, y_hi) {
        let y = sy(t);
        let _ = writeln!(
            s,
            r#"<line x1="{:.2}" y1="{y:.2}" x2="{x0}" y2="{y:.2}" stroke="black"/><text x="{:.2}" y="{:.2}" font-size="10" text-anchor="end">{t:.4}</text>"#,
            x0 - 5.0,
            x0 - 8.0,
            y + 3.0
        );
    }
    let slot = |r: &ScanRow, i: usize| [r.lower0, r.middle0, r.upper0][i].map(|y| (r.epsilon, y, r.stability[i]));
    for i in 0..3 {
        for pair in rows.windows(2) {
            let (Some((xa, ya, sa)), Some((xb, yb, _))) = (slot(&pair[0], i), slot(&pair[1], i)) else {
                continue;
            };
            let dash = if sa == Some(Stability::Repulsive) { r#" stroke-dasharray="6 4""# } else { "" };
            let _ = writeln!(
                s,
                r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="black"{dash}/>"#,
                sx(xa),
                sy(ya),
                sx(xb),
                sy(yb)
            );
        }
        for r in rows {
            if let Some((x, y, st)) = slot(r, i) {
                let fill = if st == Some(Stability::Undetermined) { "none" } else { "black" };
                let rad = if fill == "none" { 4.0 } else { 1.5 };
                let _ = writeln!(
                    s,
                    r#"<circle cx="{:.2}" cy="{:.2}" r="{rad}" fill="{fill}" stroke="black"/>"#,
                    sx(x),
                    sy(y)
                );
            }
        }
    }
    s.push_str("</svg>\n");
    s
}
