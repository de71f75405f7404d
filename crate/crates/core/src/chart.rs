//! Small built-in SVG line plotter for experiment reports. CSV stays the
//! canonical output; these charts are a convenience view of it.

use crate::render::category_color;

const W: f64 = 640.0;
const H: f64 = 420.0;
const MARGIN_L: f64 = 60.0;
const MARGIN_R: f64 = 150.0;
const MARGIN_T: f64 = 40.0;
const MARGIN_B: f64 = 50.0;

/// One named line.
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

/// Render titled series as an SVG line chart with axes and a legend.
pub fn line_chart(title: &str, x_label: &str, y_label: &str, series: &[Series]) -> String {
    let pts: Vec<(f64, f64)> = series.iter().flat_map(|s| s.points.iter().copied()).collect();
    let (x_min, x_max) = bounds(pts.iter().map(|p| p.0));
    let (y_min, y_max) = bounds(pts.iter().map(|p| p.1));
    let plot_w = W - MARGIN_L - MARGIN_R;
    let plot_h = H - MARGIN_T - MARGIN_B;
    let sx = |x: f64| MARGIN_L + (x - x_min) / (x_max - x_min).max(1e-12) * plot_w;
    let sy = |y: f64| MARGIN_T + plot_h - (y - y_min) / (y_max - y_min).max(1e-12) * plot_h;

    let mut svg = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" \
         viewBox=\"0 0 {W} {H}\">\n<rect width=\"{W}\" height=\"{H}\" fill=\"#ffffff\"/>\n"
    );
    svg.push_str(&format!(
        "<text x=\"{:.1}\" y=\"24\" font-family=\"monospace\" font-size=\"16\" \
         text-anchor=\"middle\">{title}</text>\n",
        MARGIN_L + plot_w / 2.0
    ));
    // axes
    svg.push_str(&format!(
        "<line x1=\"{l:.1}\" y1=\"{b:.1}\" x2=\"{r:.1}\" y2=\"{b:.1}\" stroke=\"#000\"/>\n\
         <line x1=\"{l:.1}\" y1=\"{t:.1}\" x2=\"{l:.1}\" y2=\"{b:.1}\" stroke=\"#000\"/>\n",
        l = MARGIN_L,
        r = MARGIN_L + plot_w,
        t = MARGIN_T,
        b = MARGIN_T + plot_h
    ));
    // ticks
    for k in 0..=4 {
        let f = k as f64 / 4.0;
        let xv = x_min + f * (x_max - x_min);
        let yv = y_min + f * (y_max - y_min);
        svg.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" font-family=\"monospace\" font-size=\"11\" \
             text-anchor=\"middle\">{xv:.2}</text>\n",
            sx(xv),
            MARGIN_T + plot_h + 18.0
        ));
        svg.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" font-family=\"monospace\" font-size=\"11\" \
             text-anchor=\"end\">{yv:.2}</text>\n",
            MARGIN_L - 6.0,
            sy(yv) + 4.0
        ));
    }
    svg.push_str(&format!(
        "<text x=\"{:.1}\" y=\"{:.1}\" font-family=\"monospace\" font-size=\"13\" \
         text-anchor=\"middle\">{x_label}</text>\n",
        MARGIN_L + plot_w / 2.0,
        H - 10.0
    ));
    svg.push_str(&format!(
        "<text x=\"16\" y=\"{mid:.1}\" font-family=\"monospace\" font-size=\"13\" \
         text-anchor=\"middle\" transform=\"rotate(-90 16 {mid:.1})\">{y_label}</text>\n",
        mid = MARGIN_T + plot_h / 2.0
    ));
    // series
    for (idx, s) in series.iter().enumerate() {
        let color = category_color(idx);
        let path: Vec<String> =
            s.points.iter().map(|&(x, y)| format!("{:.1},{:.1}", sx(x), sy(y))).collect();
        if !path.is_empty() {
            svg.push_str(&format!(
                "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"2\"/>\n",
                path.join(" ")
            ));
            for &(x, y) in &s.points {
                svg.push_str(&format!(
                    "<circle cx=\"{:.1}\" cy=\"{:.1}\" r=\"3\" fill=\"{color}\"/>\n",
                    sx(x),
                    sy(y)
                ));
            }
        }
        let ly = MARGIN_T + 14.0 * idx as f64;
        svg.push_str(&format!(
            "<line x1=\"{x0:.1}\" y1=\"{ly:.1}\" x2=\"{x1:.1}\" y2=\"{ly:.1}\" \
             stroke=\"{color}\" stroke-width=\"2\"/>\n\
             <text x=\"{tx:.1}\" y=\"{ty:.1}\" font-family=\"monospace\" font-size=\"11\">{}</text>\n",
            s.name,
            x0 = W - MARGIN_R + 8.0,
            x1 = W - MARGIN_R + 28.0,
            tx = W - MARGIN_R + 34.0,
            ty = ly + 4.0
        ));
    }
    svg.push_str("</svg>\n");
    svg
}

fn bounds(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for v in values {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if !lo.is_finite() || !hi.is_finite() {
        (0.0, 1.0)
    } else if lo == hi {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chart_contains_series_and_axes() {
        let svg = line_chart(
            "mIOU vs objects",
            "objects",
            "mIOU",
            &[
                Series { name: "wsgc-s".into(), points: vec![(4.0, 0.3), (8.0, 0.4), (16.0, 0.5)] },
                Series { name: "baseline".into(), points: vec![(4.0, 0.25), (8.0, 0.2)] },
            ],
        );
        assert!(svg.contains("polyline"));
        assert!(svg.contains("wsgc-s"));
        assert!(svg.contains("baseline"));
        assert!(svg.contains("mIOU vs objects"));
    }

    #[test]
    fn empty_series_still_renders() {
        let svg = line_chart("empty", "x", "y", &[]);
        assert!(svg.starts_with("<svg"));
        assert!(svg.ends_with("</svg>\n"));
    }
}
