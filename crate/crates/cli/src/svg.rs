//! Minimal SVG chart emitters: line charts (optionally log-scaled), grouped
//! bar charts, and count heatmaps. No external plotting dependency; CSV
//! files always accompany the charts for downstream tooling.

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 440.0;
const MARGIN_L: f64 = 78.0;
const MARGIN_R: f64 = 24.0;
const MARGIN_T: f64 = 46.0;
const MARGIN_B: f64 = 64.0;

const PALETTE: [&str; 6] = ["#2a6fb0", "#c03d33", "#3d8f4e", "#8452a0", "#b07f2a", "#4a4a4a"];

pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

fn fmt_tick(v: f64) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    let a = v.abs();
    if a >= 0.01 && a < 10_000.0 {
        let s = format!("{v:.3}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        format!("{v:.1e}")
    }
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

struct Frame {
    x_min: f64,
    x_max: f64,
    y_min: f64,
    y_max: f64,
    log_x: bool,
    log_y: bool,
}

impl Frame {
    fn tx(&self, x: f64) -> f64 {
        let (lo, hi, v) = if self.log_x {
            (self.x_min.log10(), self.x_max.log10(), x.log10())
        } else {
            (self.x_min, self.x_max, x)
        };
        let span = if hi > lo { hi - lo } else { 1.0 };
        MARGIN_L + (v - lo) / span * (WIDTH - MARGIN_L - MARGIN_R)
    }

    fn ty(&self, y: f64) -> f64 {
        let (lo, hi, v) = if self.log_y {
            (self.y_min.log10(), self.y_max.log10(), y.log10())
        } else {
            (self.y_min, self.y_max, y)
        };
        let span = if hi > lo { hi - lo } else { 1.0 };
        HEIGHT - MARGIN_B - (v - lo) / span * (HEIGHT - MARGIN_T - MARGIN_B)
    }

    fn x_ticks(&self) -> Vec<f64> {
        ticks(self.x_min, self.x_max, self.log_x)
    }

    fn y_ticks(&self) -> Vec<f64> {
        ticks(self.y_min, self.y_max, self.log_y)
    }
}

fn ticks(min: f64, max: f64, log: bool) -> Vec<f64> {
    if log {
        let lo = min.log10().floor() as i32;
        let hi = max.log10().ceil() as i32;
        (lo..=hi).map(|e| 10f64.powi(e)).filter(|v| *v >= min * 0.999 && *v <= max * 1.001).collect()
    } else {
        (0..=4).map(|i| min + (max - min) * i as f64 / 4.0).collect()
    }
}

fn chart_header(out: &mut String, title: &str) {
    out.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
         viewBox=\"0 0 {WIDTH} {HEIGHT}\" font-family=\"sans-serif\">\n"
    ));
    out.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    out.push_str(&format!(
        "<text x=\"{}\" y=\"24\" font-size=\"15\" text-anchor=\"middle\">{}</text>\n",
        WIDTH / 2.0,
        escape(title)
    ));
}

fn axes(out: &mut String, frame: &Frame, x_label: &str, y_label: &str) {
    let x0 = MARGIN_L;
    let x1 = WIDTH - MARGIN_R;
    let y0 = HEIGHT - MARGIN_B;
    let y1 = MARGIN_T;
    out.push_str(&format!(
        "<line x1=\"{x0}\" y1=\"{y0}\" x2=\"{x1}\" y2=\"{y0}\" stroke=\"black\"/>\n\
         <line x1=\"{x0}\" y1=\"{y0}\" x2=\"{x0}\" y2=\"{y1}\" stroke=\"black\"/>\n"
    ));
    for t in frame.x_ticks() {
        let x = frame.tx(t);
        out.push_str(&format!(
            "<line x1=\"{x}\" y1=\"{y0}\" x2=\"{x}\" y2=\"{}\" stroke=\"black\"/>\n\
             <text x=\"{x}\" y=\"{}\" font-size=\"11\" text-anchor=\"middle\">{}</text>\n",
            y0 + 5.0,
            y0 + 20.0,
            fmt_tick(t)
        ));
    }
    for t in frame.y_ticks() {
        let y = frame.ty(t);
        out.push_str(&format!(
            "<line x1=\"{}\" y1=\"{y}\" x2=\"{x0}\" y2=\"{y}\" stroke=\"black\"/>\n\
             <text x=\"{}\" y=\"{}\" font-size=\"11\" text-anchor=\"end\">{}</text>\n",
            x0 - 5.0,
            x0 - 8.0,
            y + 4.0,
            fmt_tick(t)
        ));
    }
    out.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" font-size=\"13\" text-anchor=\"middle\">{}</text>\n",
        (MARGIN_L + WIDTH - MARGIN_R) / 2.0,
        HEIGHT - 16.0,
        escape(x_label)
    ));
    out.push_str(&format!(
        "<text x=\"20\" y=\"{}\" font-size=\"13\" text-anchor=\"middle\" \
         transform=\"rotate(-90 20 {})\">{}</text>\n",
        (MARGIN_T + HEIGHT - MARGIN_B) / 2.0,
        (MARGIN_T + HEIGHT - MARGIN_B) / 2.0,
        escape(y_label)
    ));
}

fn legend(out: &mut String, labels: &[&str]) {
    for (i, label) in labels.iter().enumerate() {
        let y = MARGIN_T + 14.0 * i as f64 + 4.0;
        let x = WIDTH - MARGIN_R - 150.0;
        out.push_str(&format!(
            "<rect x=\"{x}\" y=\"{}\" width=\"10\" height=\"10\" fill=\"{}\"/>\n\
             <text x=\"{}\" y=\"{}\" font-size=\"11\">{}</text>\n",
            y - 9.0,
            PALETTE[i % PALETTE.len()],
            x + 14.0,
            y,
            escape(label)
        ));
    }
}

/// Line chart over one or more series; log axes require positive data.
pub fn line_chart(
    title: &str,
    x_label: &str,
    y_label: &str,
    series: &[Series],
    log_x: bool,
    log_y: bool,
) -> String {
    let mut xs: Vec<f64> = Vec::new();
    let mut ys: Vec<f64> = Vec::new();
    for s in series {
        for (x, y) in &s.points {
            xs.push(*x);
            ys.push(*y);
        }
    }
    let pos_min = |v: &[f64]| v.iter().cloned().filter(|x| *x > 0.0).fold(f64::INFINITY, f64::min);
    let x_min = if log_x { pos_min(&xs) } else { xs.iter().cloned().fold(f64::INFINITY, f64::min) };
    let x_max = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let y_min = if log_y { pos_min(&ys) } else { ys.iter().cloned().fold(f64::INFINITY, f64::min).min(0.0) };
    let y_max = ys.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let frame = Frame { x_min, x_max, y_min, y_max: y_max.max(y_min + 1e-12), log_x, log_y };

    let mut out = String::new();
    chart_header(&mut out, title);
    axes(&mut out, &frame, x_label, y_label);
    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let path: Vec<String> = s
            .points
            .iter()
            .filter(|(x, y)| (!log_x || *x > 0.0) && (!log_y || *y > 0.0))
            .map(|(x, y)| format!("{:.2},{:.2}", frame.tx(*x), frame.ty(*y)))
            .collect();
        out.push_str(&format!(
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.8\"/>\n",
            path.join(" ")
        ));
        for (x, y) in &s.points {
            if (log_x && *x <= 0.0) || (log_y && *y <= 0.0) {
                continue;
            }
            out.push_str(&format!(
                "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"2.6\" fill=\"{color}\"/>\n",
                frame.tx(*x),
                frame.ty(*y)
            ));
        }
    }
    if series.len() > 1 {
        let labels: Vec<&str> = series.iter().map(|s| s.label.as_str()).collect();
        legend(&mut out, &labels);
    }
    out.push_str("</svg>\n");
    out
}

/// Grouped bar chart: one group per entry of `group_labels`, one bar per
/// series inside each group.
pub fn bar_chart(
    title: &str,
    x_label: &str,
    y_label: &str,
    group_labels: &[String],
    series: &[(String, Vec<f64>)],
) -> String {
    let y_max = series
        .iter()
        .flat_map(|(_, v)| v.iter().cloned())
        .fold(0.0f64, f64::max)
        .max(1e-12);
    let frame = Frame { x_min: 0.0, x_max: 1.0, y_min: 0.0, y_max, log_x: false, log_y: false };

    let mut out = String::new();
    chart_header(&mut out, title);
    axes(&mut out, &frame, x_label, y_label);

    let plot_w = WIDTH - MARGIN_L - MARGIN_R;
    let groups = group_labels.len().max(1) as f64;
    let group_w = plot_w / groups;
    let bar_w = group_w * 0.8 / series.len().max(1) as f64;
    for (g, label) in group_labels.iter().enumerate() {
        let gx = MARGIN_L + group_w * (g as f64 + 0.1);
        for (s, (_, values)) in series.iter().enumerate() {
            let v = values.get(g).cloned().unwrap_or(0.0);
            let top = frame.ty(v);
            let h = (HEIGHT - MARGIN_B) - top;
            out.push_str(&format!(
                "<rect x=\"{:.2}\" y=\"{top:.2}\" width=\"{bar_w:.2}\" height=\"{h:.2}\" fill=\"{}\"/>\n",
                gx + s as f64 * bar_w,
                PALETTE[s % PALETTE.len()]
            ));
        }
        out.push_str(&format!(
            "<text x=\"{:.2}\" y=\"{}\" font-size=\"11\" text-anchor=\"middle\">{}</text>\n",
            gx + group_w * 0.4,
            HEIGHT - MARGIN_B + 20.0,
            escape(label)
        ));
    }
    if series.len() > 1 {
        let labels: Vec<&str> = series.iter().map(|(l, _)| l.as_str()).collect();
        legend(&mut out, &labels);
    }
    out.push_str("</svg>\n");
    out
}

/// Count heatmap (actual rows, predicted columns) with per-cell labels.
pub fn heatmap(title: &str, class_labels: &[String], counts: &[Vec<u64>]) -> String {
    let n = class_labels.len().max(1);
    let max = counts.iter().flatten().cloned().max().unwrap_or(1).max(1) as f64;
    let plot_w = WIDTH - MARGIN_L - MARGIN_R;
    let plot_h = HEIGHT - MARGIN_T - MARGIN_B;
    let cell_w = plot_w / n as f64;
    let cell_h = plot_h / n as f64;

    let mut out = String::new();
    chart_header(&mut out, title);
    for (i, row) in counts.iter().enumerate() {
        for (j, &count) in row.iter().enumerate() {
            let x = MARGIN_L + j as f64 * cell_w;
            let y = MARGIN_T + i as f64 * cell_h;
            let intensity = (count as f64 / max).sqrt();
            let shade = (255.0 - 205.0 * intensity) as u8;
            out.push_str(&format!(
                "<rect x=\"{x:.1}\" y=\"{y:.1}\" width=\"{cell_w:.1}\" height=\"{cell_h:.1}\" \
                 fill=\"rgb({shade},{shade},255)\" stroke=\"white\"/>\n\
                 <text x=\"{:.1}\" y=\"{:.1}\" font-size=\"13\" text-anchor=\"middle\">{count}</text>\n",
                x + cell_w / 2.0,
                y + cell_h / 2.0 + 4.0
            ));
        }
    }
    for (i, label) in class_labels.iter().enumerate() {
        out.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{}\" font-size=\"12\" text-anchor=\"middle\">{}</text>\n",
            MARGIN_L + (i as f64 + 0.5) * cell_w,
            HEIGHT - MARGIN_B + 18.0,
            escape(label)
        ));
        out.push_str(&format!(
            "<text x=\"{}\" y=\"{:.1}\" font-size=\"12\" text-anchor=\"end\">{}</text>\n",
            MARGIN_L - 8.0,
            MARGIN_T + (i as f64 + 0.5) * cell_h + 4.0,
            escape(label)
        ));
    }
    out.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" font-size=\"13\" text-anchor=\"middle\">predicted</text>\n",
        MARGIN_L + plot_w / 2.0,
        HEIGHT - 16.0
    ));
    out.push_str(&format!(
        "<text x=\"20\" y=\"{}\" font-size=\"13\" text-anchor=\"middle\" \
         transform=\"rotate(-90 20 {})\">actual</text>\n",
        MARGIN_T + plot_h / 2.0,
        MARGIN_T + plot_h / 2.0
    ));
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_chart_is_well_formed() {
        let s = Series { label: "a".into(), points: vec![(0.1, 1.0), (1.0, 2.0), (10.0, 0.5)] };
        let svg = line_chart("t", "x", "y", &[s], true, false);
        assert!(svg.starts_with("<svg"));
        assert!(svg.ends_with("</svg>\n"));
        assert!(svg.contains("polyline"));
    }

    #[test]
    fn bar_chart_handles_groups() {
        let svg = bar_chart(
            "t",
            "case",
            "value",
            &["i".into(), "ii".into()],
            &[("a".into(), vec![0.5, 0.25]), ("b".into(), vec![0.1, 0.4])],
        );
        assert!(svg.matches("<rect").count() >= 5);
    }

    #[test]
    fn heatmap_renders_counts() {
        let svg = heatmap("t", &["2".into(), "3".into()], &[vec![5, 1], vec![0, 7]]);
        assert!(svg.contains(">7</text>"));
        assert!(svg.contains("actual"));
    }

    #[test]
    fn titles_are_escaped() {
        let svg = line_chart("a<b&c", "x", "y", &[], false, false);
        assert!(svg.contains("a&lt;b&amp;c"));
    }
}
