//! Minimal SVG line charts.

use std::fmt::Write;

use lmpgnn::ResultTable;

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 480.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 180.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

struct Series {
    label: String,
    points: Vec<(f64, f64)>,
    dashed: bool,
}

struct Axis {
    lo: f64,
    hi: f64,
    log: bool,
}

impl Axis {
    fn new(values: impl Iterator<Item = f64>, log: bool) -> Self {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for v in values.filter(|v| v.is_finite() && (!log || *v > 0.0)) {
            let v = if log { v.log10() } else { v };
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if !lo.is_finite() {
            (lo, hi) = (0.0, 1.0);
        }
        if log {
            lo = lo.floor();
            hi = hi.ceil();
        }
        if hi - lo < 1e-12 {
            hi = lo + 1.0;
        }
        Self { lo, hi, log }
    }

    fn frac(&self, v: f64) -> Option<f64> {
        let v = if self.log {
            if v <= 0.0 {
                return None;
            }
            v.log10()
        } else {
            v
        };
        v.is_finite().then(|| (v - self.lo) / (self.hi - self.lo))
    }

    fn ticks(&self) -> Vec<(f64, String)> {
        if self.log {
            let (lo, hi) = (self.lo as i32, self.hi as i32);
            let step = ((hi - lo) / 8).max(1);
            (lo..=hi)
                .step_by(step as usize)
                .map(|e| (10f64.powi(e), format!("1e{e}")))
                .collect()
        } else {
            (0..=5)
                .map(|i| {
                    let v = self.lo + (self.hi - self.lo) * i as f64 / 5.0;
                    (v, format!("{v:.3}"))
                })
                .collect()
        }
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn render(title: &str, x_label: &str, y_label: &str, series: &[Series], log: bool) -> String {
    let xs = series.iter().flat_map(|s| s.points.iter().map(|p| p.0));
    let x_axis = Axis::new(xs, false);
    let y_axis = Axis::new(series.iter().flat_map(|s| s.points.iter().map(|p| p.1)), log);
    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    let px = |x: f64| LEFT + x_axis.frac(x).unwrap_or(0.0) * plot_w;
    let py = |f: f64| TOP + (1.0 - f) * plot_h;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{:.1}" y="24" text-anchor="middle" font-size="15">{}</text>"#,
        LEFT + plot_w / 2.0,
        escape(title)
    );
    let _ = writeln!(
        svg,
        r#"<rect x="{LEFT}" y="{TOP}" width="{plot_w}" height="{plot_h}" fill="none" stroke="black"/>"#
    );

    for (v, label) in y_axis.ticks() {
        let Some(f) = y_axis.frac(v) else { continue };
        let y = py(f);
        let _ = writeln!(
            svg,
            r##"<line x1="{LEFT}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#dddddd"/><text x="{:.1}" y="{:.2}" text-anchor="end">{label}</text>"##,
            LEFT + plot_w,
            LEFT - 6.0,
            y + 4.0
        );
    }
    for (v, _) in x_axis.ticks() {
        let x = px(v);
        let _ = writeln!(
            svg,
            r#"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="black"/><text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            TOP + plot_h,
            TOP + plot_h + 5.0,
            TOP + plot_h + 18.0,
            v.round()
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
        LEFT + plot_w / 2.0,
        HEIGHT - 16.0,
        escape(x_label)
    );
    let y_text = if log {
        format!("{y_label} (log scale)")
    } else {
        y_label.to_owned()
    };
    let _ = writeln!(
        svg,
        r#"<text x="20" y="{:.1}" text-anchor="middle" transform="rotate(-90 20 {:.1})" class="y-axis{}">{}</text>"#,
        TOP + plot_h / 2.0,
        TOP + plot_h / 2.0,
        if log { " log-scale" } else { "" },
        escape(&y_text)
    );

    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let mut d = String::new();
        let mut pen_down = false;
        for &(x, y) in &s.points {
            match y_axis.frac(y) {
                Some(f) => {
                    let _ = write!(
                        d,
                        "{}{:.2},{:.2} ",
                        if pen_down { "L" } else { "M" },
                        px(x),
                        py(f.clamp(-0.05, 1.05))
                    );
                    pen_down = true;
                }
                None => pen_down = false,
            }
        }
        let dash = if s.dashed { r#" stroke-dasharray="6 4""# } else { "" };
        let _ = writeln!(
            svg,
            r#"<path class="series" data-label="{}" d="{}" fill="none" stroke="{color}" stroke-width="1.6"{dash}/>"#,
            escape(&s.label),
            d.trim_end()
        );
        let ly = TOP + 12.0 + 18.0 * i as f64;
        let lx = LEFT + plot_w + 12.0;
        let _ = writeln!(
            svg,
            r#"<line x1="{lx:.1}" y1="{ly:.1}" x2="{:.1}" y2="{ly:.1}" stroke="{color}" stroke-width="2"{dash}/><text x="{:.1}" y="{:.1}">{}</text>"#,
            lx + 24.0,
            lx + 30.0,
            ly + 4.0,
            escape(&s.label)
        );
    }
    svg.push_str("</svg>\n");
    svg
}

/// MSE[t] averaged over completed repetitions, one line per method.
pub fn mse_chart(table: &ResultTable, log: bool) -> String {
    let series: Vec<Series> = table
        .methods
        .iter()
        .map(|m| {
            let completed: Vec<&[f64]> = m.runs.iter().filter_map(|r| r.series()).collect();
            let len = completed.iter().map(|s| s.len()).max().unwrap_or(0);
            let points = (0..len)
                .map(|k| {
                    let mean = completed.iter().map(|s| s[k]).sum::<f64>() / completed.len() as f64;
                    ((table.test_start + k) as f64, mean)
                })
                .collect();
            let diverged = m.diverged_count();
            let label = if diverged > 0 {
                format!("{} ({diverged} diverged)", m.label)
            } else {
                m.label.clone()
            };
            Series {
                label,
                points,
                dashed: false,
            }
        })
        .collect();
    render(
        &format!("{}: MSE per timestep", table.experiment),
        "timestep",
        "MSE",
        &series,
        log,
    )
}

/// Ground truth and per-method predictions at the trace node.
pub fn trace_chart(table: &ResultTable) -> Option<String> {
    let at = |v: &[f64]| -> Vec<(f64, f64)> {
        v.iter()
            .enumerate()
            .map(|(k, &y)| ((table.test_start + k) as f64, y))
            .collect()
    };
    let mut series = vec![Series {
        label: "ground truth".into(),
        points: at(&table.trace_truth),
        dashed: true,
    }];
    for m in &table.methods {
        if let Some(trace) = &m.trace {
            series.push(Series {
                label: m.label.clone(),
                points: at(trace),
                dashed: false,
            });
        }
    }
    if series.len() == 1 {
        return None;
    }
    Some(render(
        &format!("{}: prediction at one node", table.experiment),
        "timestep",
        "signal",
        &series,
        false,
    ))
}
