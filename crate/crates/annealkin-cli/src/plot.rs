//! Minimal native SVG line charts (polylines plus axes), with fixed-point
//! coordinate formatting so identical data produces identical bytes.

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 460.0;
const MARGIN_LEFT: f64 = 74.0;
const MARGIN_RIGHT: f64 = 24.0;
const MARGIN_TOP: f64 = 46.0;
const MARGIN_BOTTOM: f64 = 58.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

pub struct Series<'a> {
    pub label: String,
    pub points: &'a [(f64, f64)],
}

/// Render one chart. `log_x` plots `log10(x)` (points with `x <= 0` are
/// dropped); non-finite points are dropped everywhere.
pub fn line_chart(
    title: &str,
    x_label: &str,
    y_label: &str,
    series: &[Series],
    log_x: bool,
) -> String {
    let mut cleaned: Vec<(usize, Vec<(f64, f64)>)> = Vec::new();
    for (i, s) in series.iter().enumerate() {
        let pts: Vec<(f64, f64)> = s
            .points
            .iter()
            .filter(|(x, y)| x.is_finite() && y.is_finite() && (!log_x || *x > 0.0))
            .map(|&(x, y)| (if log_x { x.log10() } else { x }, y))
            .collect();
        cleaned.push((i, pts));
    }
    let xs = cleaned.iter().flat_map(|(_, p)| p.iter().map(|q| q.0));
    let ys = cleaned.iter().flat_map(|(_, p)| p.iter().map(|q| q.1));
    let (x_lo, x_hi) = padded_bounds(xs);
    let (y_lo, y_hi) = padded_bounds(ys);

    let to_px = |x: f64, y: f64| -> (f64, f64) {
        let w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
        let h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
        let px = MARGIN_LEFT + (x - x_lo) / (x_hi - x_lo) * w;
        let py = HEIGHT - MARGIN_BOTTOM - (y - y_lo) / (y_hi - y_lo) * h;
        (px, py)
    };

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {WIDTH} {HEIGHT}\" \
         font-family=\"sans-serif\" font-size=\"13\">\n",
    ));
    svg.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    svg.push_str(&format!(
        "<text x=\"{:.1}\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">{}</text>\n",
        WIDTH / 2.0,
        escape(title),
    ));

    // Axes with five ticks each.
    let (ox, oy) = to_px(x_lo, y_lo);
    let (fx, _) = to_px(x_hi, y_lo);
    let (_, ty) = to_px(x_lo, y_hi);
    svg.push_str(&format!(
        "<line x1=\"{ox:.1}\" y1=\"{oy:.1}\" x2=\"{fx:.1}\" y2=\"{oy:.1}\" stroke=\"black\"/>\n"
    ));
    svg.push_str(&format!(
        "<line x1=\"{ox:.1}\" y1=\"{oy:.1}\" x2=\"{ox:.1}\" y2=\"{ty:.1}\" stroke=\"black\"/>\n"
    ));
    for i in 0..=4 {
        let fx_val = x_lo + (x_hi - x_lo) * i as f64 / 4.0;
        let fy_val = y_lo + (y_hi - y_lo) * i as f64 / 4.0;
        let (tx_px, _) = to_px(fx_val, y_lo);
        let (_, ty_px) = to_px(x_lo, fy_val);
        svg.push_str(&format!(
            "<line x1=\"{tx_px:.1}\" y1=\"{oy:.1}\" x2=\"{tx_px:.1}\" y2=\"{:.1}\" stroke=\"black\"/>\n",
            oy + 5.0,
        ));
        let x_text = if log_x { format!("1e{fx_val:.1}") } else { format!("{fx_val:.3}") };
        svg.push_str(&format!(
            "<text x=\"{tx_px:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{x_text}</text>\n",
            oy + 20.0,
        ));
        svg.push_str(&format!(
            "<line x1=\"{:.1}\" y1=\"{ty_px:.1}\" x2=\"{ox:.1}\" y2=\"{ty_px:.1}\" stroke=\"black\"/>\n",
            ox - 5.0,
        ));
        svg.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\">{fy_val:.3}</text>\n",
            ox - 9.0,
            ty_px + 4.0,
        ));
    }
    svg.push_str(&format!(
        "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{}</text>\n",
        (ox + fx) / 2.0,
        HEIGHT - 14.0,
        escape(x_label),
    ));
    svg.push_str(&format!(
        "<text x=\"18\" y=\"{:.1}\" text-anchor=\"middle\" transform=\"rotate(-90 18 {:.1})\">{}</text>\n",
        (oy + ty) / 2.0,
        (oy + ty) / 2.0,
        escape(y_label),
    ));

    for (i, pts) in &cleaned {
        let color = PALETTE[i % PALETTE.len()];
        if !pts.is_empty() {
            let coords: Vec<String> = pts
                .iter()
                .map(|&(x, y)| {
                    let (px, py) = to_px(x, y);
                    format!("{px:.2},{py:.2}")
                })
                .collect();
            svg.push_str(&format!(
                "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"/>\n",
                coords.join(" "),
            ));
        }
        svg.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" fill=\"{color}\">{}</text>\n",
            WIDTH - MARGIN_RIGHT - 150.0,
            MARGIN_TOP + 16.0 * *i as f64,
            escape(&series[*i].label),
        ));
    }
    svg.push_str("</svg>\n");
    svg
}

/// Finite data bounds padded by 5%, with degenerate ranges widened to unit.
fn padded_bounds(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for v in values {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if !(lo.is_finite() && hi.is_finite()) {
        return (0.0, 1.0);
    }
    let span = (hi - lo).max(1e-12);
    if hi == lo {
        return (lo - 0.5, hi + 0.5);
    }
    (lo - 0.05 * span, hi + 0.05 * span)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chart_is_deterministic_and_well_formed() {
        let points = [(1.0, 0.9), (10.0, 0.5), (100.0, 0.2)];
        let series = [Series { label: "p".into(), points: &points }];
        let a = line_chart("decay", "t", "p", &series, true);
        let b = line_chart("decay", "t", "p", &series, true);
        assert_eq!(a, b);
        assert!(a.starts_with("<svg"));
        assert!(a.ends_with("</svg>\n"));
        assert!(a.contains("<polyline"));
        assert_eq!(a.matches("<line").count(), 12, "2 axes + 10 ticks");
    }

    #[test]
    fn log_axis_drops_nonpositive_and_escapes_labels() {
        let points = [(0.0, 0.1), (-3.0, 0.2), (10.0, 0.5), (100.0, 0.7)];
        let series = [Series { label: "a<b".into(), points: &points }];
        let svg = line_chart("t & p", "t", "p", &series, true);
        assert!(svg.contains("a&lt;b"));
        assert!(svg.contains("t &amp; p"));
        let polyline = svg.split("<polyline").nth(1).unwrap();
        let coord_count = polyline.split('"').nth(1).unwrap().split(' ').count();
        assert_eq!(coord_count, 2, "only the two positive-x points survive");
    }

    #[test]
    fn empty_series_still_renders_axes() {
        let svg = line_chart("empty", "x", "y", &[], false);
        assert!(svg.contains("</svg>"));
        assert!(!svg.contains("<polyline"));
    }
}
