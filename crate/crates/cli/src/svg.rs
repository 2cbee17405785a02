//! Self-contained SVG line plots with explicit breaks at jump steps, so
//! discontinuities render as gaps instead of steep connecting segments.

const WIDTH: f64 = 900.0;
const HEIGHT: f64 = 560.0;
const MARGIN: f64 = 64.0;

/// Renders y against x as polyline segments. `breaks[k]` cuts the line
/// between points k and k+1.
pub fn line_plot(title: &str, xs: &[f64], ys: &[f64], breaks: &[bool]) -> String {
    assert_eq!(xs.len(), ys.len());
    assert_eq!(breaks.len() + 1, xs.len());
    let (x_lo, x_hi) = bounds(xs);
    let (y_lo, y_hi) = padded_bounds(ys);
    let to_x = |x: f64| MARGIN + (x - x_lo) / (x_hi - x_lo) * (WIDTH - 2.0 * MARGIN);
    let to_y = |y: f64| HEIGHT - MARGIN - (y - y_lo) / (y_hi - y_lo) * (HEIGHT - 2.0 * MARGIN);

    let mut out = String::new();
    out.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n"
    ));
    out.push_str("<!-- jumpvol svg v0.1 -->\n");
    out.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    out.push_str(&format!(
        "<text x=\"{}\" y=\"28\" font-family=\"monospace\" font-size=\"16\" text-anchor=\"middle\">{title}</text>\n",
        WIDTH / 2.0
    ));
    // axes
    out.push_str(&format!(
        "<line x1=\"{m}\" y1=\"{b}\" x2=\"{r}\" y2=\"{b}\" stroke=\"black\"/>\n<line x1=\"{m}\" y1=\"{t}\" x2=\"{m}\" y2=\"{b}\" stroke=\"black\"/>\n",
        m = MARGIN,
        b = HEIGHT - MARGIN,
        r = WIDTH - MARGIN,
        t = MARGIN,
    ));
    // tick labels
    for i in 0..=4 {
        let fx = i as f64 / 4.0;
        let x_val = x_lo + fx * (x_hi - x_lo);
        let y_val = y_lo + fx * (y_hi - y_lo);
        out.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-family=\"monospace\" font-size=\"11\" text-anchor=\"middle\">{}</text>\n",
            to_x(x_val),
            HEIGHT - MARGIN + 18.0,
            trim(x_val)
        ));
        out.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-family=\"monospace\" font-size=\"11\" text-anchor=\"end\">{}</text>\n",
            MARGIN - 6.0,
            to_y(y_val) + 4.0,
            trim(y_val)
        ));
    }
    // polyline segments split at breaks
    let mut seg: Vec<String> = Vec::new();
    let mut flush = |seg: &mut Vec<String>, out: &mut String| {
        if seg.len() >= 2 {
            out.push_str(&format!(
                "<polyline points=\"{}\" fill=\"none\" stroke=\"#1f4e9c\" stroke-width=\"1.3\"/>\n",
                seg.join(" ")
            ));
        } else if seg.len() == 1 {
            let xy: Vec<&str> = seg[0].split(',').collect();
            out.push_str(&format!(
                "<circle cx=\"{}\" cy=\"{}\" r=\"1.6\" fill=\"#1f4e9c\"/>\n",
                xy[0], xy[1]
            ));
        }
        seg.clear();
    };
    for k in 0..xs.len() {
        seg.push(format!("{},{}", to_x(xs[k]), to_y(ys[k])));
        if k < breaks.len() && breaks[k] {
            flush(&mut seg, &mut out);
        }
    }
    flush(&mut seg, &mut out);
    out.push_str("</svg>\n");
    out
}

fn bounds(v: &[f64]) -> (f64, f64) {
    let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if lo == hi {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    }
}

fn padded_bounds(v: &[f64]) -> (f64, f64) {
    let (lo, hi) = bounds(v);
    let pad = 0.05 * (hi - lo);
    (lo - pad, hi + pad)
}

fn trim(x: f64) -> String {
    let s = format!("{x:.4}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s.is_empty() || s == "-" {
        "0".into()
    } else {
        s.to_string()
    }
}
