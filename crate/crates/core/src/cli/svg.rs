//! Hand-rolled SVG line charts for growth curves.
//!
//! Fitness spans hundreds of decades once a self-referential run takes off,
//! so the y axis is symmetric-log: `sign(y) · log10(1 + |y|)`.

use std::fmt::Write as _;

use crate::experiments::CurveSummary;

const PANEL_W: f64 = 460.0;
const PANEL_H: f64 = 340.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 20.0;
const MARGIN_T: f64 = 40.0;
const MARGIN_B: f64 = 50.0;
const MAX_POINTS: usize = 400;

const PALETTE: [&str; 8] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
];

pub fn symlog(y: f64) -> f64 {
    y.signum() * y.abs().ln_1p() / std::f64::consts::LN_10
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Indices to plot: at most `MAX_POINTS`, always including the last.
fn sample_indices(len: usize) -> Vec<usize> {
    if len <= MAX_POINTS {
        return (0..len).collect();
    }
    let stride = len.div_ceil(MAX_POINTS);
    let mut idx: Vec<usize> = (0..len).step_by(stride).collect();
    if idx.last() != Some(&(len - 1)) {
        idx.push(len - 1);
    }
    idx
}

struct Frame {
    x0: f64,
    y0: f64,
    t_max: f64,
    y_lo: f64,
    y_hi: f64,
}

impl Frame {
    fn px(&self, generation: f64) -> f64 {
        self.x0 + MARGIN_L + (generation / self.t_max) * (PANEL_W - MARGIN_L - MARGIN_R)
    }

    fn py(&self, value: f64) -> f64 {
        let frac = (symlog(value) - self.y_lo) / (self.y_hi - self.y_lo);
        self.y0 + PANEL_H - MARGIN_B - frac * (PANEL_H - MARGIN_T - MARGIN_B)
    }
}

fn panel(svg: &mut String, curves: &[&CurveSummary], colors: &[&str], frame: &Frame, title: &str) {
    let (x0, y0) = (frame.x0, frame.y0);
    let left = x0 + MARGIN_L;
    let right = x0 + PANEL_W - MARGIN_R;
    let top = y0 + MARGIN_T;
    let bottom = y0 + PANEL_H - MARGIN_B;
    let _ = writeln!(svg, r#"<g class="panel">"#);
    let _ = writeln!(
        svg,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" font-size="15">{}</text>"#,
        (left + right) / 2.0,
        y0 + 22.0,
        xml_escape(title)
    );
    let _ = writeln!(
        svg,
        r##"<rect x="{left:.1}" y="{top:.1}" width="{:.1}" height="{:.1}" fill="none" stroke="#333"/>"##,
        right - left,
        bottom - top
    );

    for i in 0..=4 {
        let g = frame.t_max * i as f64 / 4.0;
        let x = frame.px(g);
        let _ = writeln!(
            svg,
            r##"<line x1="{x:.1}" y1="{bottom:.1}" x2="{x:.1}" y2="{:.1}" stroke="#333"/><text x="{x:.1}" y="{:.1}" text-anchor="middle" font-size="11">{}</text>"##,
            bottom + 5.0,
            bottom + 18.0,
            g.round()
        );
    }
    let (lo, hi) = (frame.y_lo.floor() as i64, frame.y_hi.ceil() as i64);
    let step = ((hi - lo) / 6).max(1);
    let mut tick = lo - lo.rem_euclid(step);
    while tick <= hi {
        let s = tick as f64;
        if s >= frame.y_lo && s <= frame.y_hi {
            let y = frame.py(s.signum() * (10f64.powf(s.abs()) - 1.0));
            let label = match tick {
                0 => "0".to_string(),
                t if t > 0 => format!("1e{t}"),
                t => format!("-1e{}", -t),
            };
            let _ = writeln!(
                svg,
                r##"<line x1="{:.1}" y1="{y:.1}" x2="{left:.1}" y2="{y:.1}" stroke="#333"/><text x="{:.1}" y="{:.1}" text-anchor="end" font-size="11">{label}</text>"##,
                left - 5.0,
                left - 8.0,
                y + 4.0
            );
        }
        tick += step;
    }
    let _ = writeln!(
        svg,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" font-size="12">generation</text>"#,
        (left + right) / 2.0,
        bottom + 38.0
    );

    for (curve, color) in curves.iter().zip(colors) {
        let idx = sample_indices(curve.mean.len());
        if idx.is_empty() {
            continue;
        }
        let mut band = String::new();
        for &j in &idx {
            let _ = write!(band, "{:.2},{:.2} ", frame.px((j + 1) as f64), frame.py(curve.mean[j] + curve.sem[j]));
        }
        for &j in idx.iter().rev() {
            let _ = write!(band, "{:.2},{:.2} ", frame.px((j + 1) as f64), frame.py(curve.mean[j] - curve.sem[j]));
        }
        let _ = writeln!(
            svg,
            r#"<polygon class="sem-band" points="{}" fill="{color}" fill-opacity="0.2" stroke="none"/>"#,
            band.trim_end()
        );
        let mut line = String::new();
        for &j in &idx {
            let _ = write!(line, "{:.2},{:.2} ", frame.px((j + 1) as f64), frame.py(curve.mean[j]));
        }
        let _ = writeln!(
            svg,
            r#"<polyline class="curve" data-variant="{}" data-k="{}" points="{}" fill="none" stroke="{color}" stroke-width="1.6"/>"#,
            curve.variant,
            curve.k,
            line.trim_end()
        );
    }

    for (i, (curve, color)) in curves.iter().zip(colors).enumerate() {
        let y = top + 14.0 + 16.0 * i as f64;
        let mut label = curve.variant.label();
        if let Some(t) = curve.truncated_at {
            let _ = write!(label, " (overflow at {t})");
        }
        let _ = writeln!(
            svg,
            r#"<line x1="{:.1}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="{color}" stroke-width="2"/><text x="{:.1}" y="{:.1}" font-size="11">{}</text>"#,
            left + 8.0,
            left + 28.0,
            left + 33.0,
            y + 4.0,
            xml_escape(&label)
        );
    }
    let _ = writeln!(svg, "</g>");
}

/// One panel per survivor count (largest k first), one curve per variant.
pub fn render_growth_curves(curves: &[CurveSummary], population_size: usize) -> String {
    let mut ks: Vec<usize> = curves.iter().map(|c| c.k).collect();
    ks.sort_unstable_by(|a, b| b.cmp(a));
    ks.dedup();

    let mut variants: Vec<_> = curves.iter().map(|c| c.variant).collect();
    variants.sort();
    variants.dedup();
    let color_of = |c: &CurveSummary| PALETTE[variants.iter().position(|v| *v == c.variant).unwrap_or(0) % PALETTE.len()];

    let t_max = curves.iter().map(|c| c.mean.len()).max().unwrap_or(1).max(1) as f64;
    let (mut y_lo, mut y_hi) = (0.0f64, 1.0f64);
    for c in curves {
        for (m, s) in c.mean.iter().zip(&c.sem) {
            for v in [m - s, m + s, *m] {
                if v.is_finite() {
                    y_lo = y_lo.min(symlog(v));
                    y_hi = y_hi.max(symlog(v));
                }
            }
        }
    }

    let width = PANEL_W * ks.len().max(1) as f64;
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{PANEL_H:.0}" viewBox="0 0 {width:.0} {PANEL_H:.0}" font-family="sans-serif">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="14" y="{:.1}" font-size="12" transform="rotate(-90 14 {:.1})" text-anchor="middle">best fitness (symlog)</text>"#,
        PANEL_H / 2.0,
        PANEL_H / 2.0
    );
    for (p, &k) in ks.iter().enumerate() {
        let in_panel: Vec<&CurveSummary> = curves.iter().filter(|c| c.k == k).collect();
        let colors: Vec<&str> = in_panel.iter().map(|c| color_of(c)).collect();
        let frame = Frame {
            x0: PANEL_W * p as f64,
            y0: 0.0,
            t_max,
            y_lo,
            y_hi,
        };
        let title = format!("top-{k} of {population_size}");
        panel(&mut svg, &in_panel, &colors, &frame, &title);
    }
    svg.push_str("</svg>\n");
    svg
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::Variant;

    fn curve(variant: Variant, k: usize, len: usize) -> CurveSummary {
        let mean: Vec<f64> = (1..=len).map(|t| (t * t) as f64).collect();
        CurveSummary {
            key: crate::aggregate::CellKey {
                task: "numeric".into(),
                target: String::new(),
                order: variant.order,
                self_ref: variant.self_referential,
                beta: 1.0,
                k,
                pop: 64,
            },
            variant,
            k,
            sem: vec![1.0; len],
            final_mean: *mean.last().unwrap(),
            final_sem: 1.0,
            final_values: vec![],
            mean,
            truncated_at: None,
            growth: None,
            growth_error: None,
        }
    }

    #[test]
    fn one_polyline_per_curve_and_panel() {
        let variants = [Variant::standard(0), Variant::standard(1), Variant::self_referential(1)];
        let curves: Vec<CurveSummary> = [2, 1]
            .iter()
            .flat_map(|&k| variants.iter().map(move |&v| curve(v, k, 1000)))
            .collect();
        let svg = render_growth_curves(&curves, 64);
        assert!(svg.starts_with("<svg"));
        assert!(svg.trim_end().ends_with("</svg>"));
        assert_eq!(svg.matches(r#"class="panel""#).count(), 2);
        assert_eq!(svg.matches(r#"class="curve""#).count(), 6);
        assert_eq!(svg.matches(r#"data-variant="sr1" data-k="2""#).count(), 1);
        assert!(!svg.contains("NaN"));
    }

    #[test]
    fn symlog_is_odd_and_monotone() {
        assert_eq!(symlog(0.0), 0.0);
        assert!((symlog(9.0) - 1.0).abs() < 1e-12);
        assert_eq!(symlog(-99.0), -symlog(99.0));
        assert!(symlog(1e300) > symlog(1e299));
    }

    #[test]
    fn downsampling_keeps_endpoints() {
        let idx = sample_indices(1001);
        assert!(idx.len() <= MAX_POINTS + 1);
        assert_eq!(idx[0], 0);
        assert_eq!(*idx.last().unwrap(), 1000);
    }
}
