//! Self-contained SVG plots: smoothed reward curves and joint-trajectory
//! tracking figures.

use std::path::Path;

use anyhow::{bail, Result};

use crate::csvio::NumericCsv;

const WIDTH: f64 = 860.0;
const HEIGHT: f64 = 480.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 20.0;
const MARGIN_T: f64 = 30.0;
const MARGIN_B: f64 = 55.0;

const PALETTE: [&str; 6] = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b"];

pub struct Series {
    pub label: String,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub dashed: bool,
}

/// Renders labelled series with axes, ticks, and a legend.
pub fn render_svg(title: &str, x_label: &str, y_label: &str, series: &[Series]) -> Result<String> {
    if series.is_empty() || series.iter().all(|s| s.x.is_empty()) {
        bail!("nothing to plot");
    }
    let (mut x_min, mut x_max) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut y_min, mut y_max) = (f64::INFINITY, f64::NEG_INFINITY);
    for s in series {
        for (&x, &y) in s.x.iter().zip(&s.y) {
            x_min = x_min.min(x);
            x_max = x_max.max(x);
            y_min = y_min.min(y);
            y_max = y_max.max(y);
        }
    }
    if !(x_min.is_finite() && y_min.is_finite()) {
        bail!("non-finite plot data");
    }
    if (x_max - x_min).abs() < 1e-12 {
        x_max = x_min + 1.0;
    }
    if (y_max - y_min).abs() < 1e-12 {
        y_max = y_min + 1.0;
    }
    let pad = 0.05 * (y_max - y_min);
    y_min -= pad;
    y_max += pad;

    let plot_w = WIDTH - MARGIN_L - MARGIN_R;
    let plot_h = HEIGHT - MARGIN_T - MARGIN_B;
    let sx = move |x: f64| MARGIN_L + (x - x_min) / (x_max - x_min) * plot_w;
    let sy = move |y: f64| MARGIN_T + (1.0 - (y - y_min) / (y_max - y_min)) * plot_h;

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
         viewBox=\"0 0 {WIDTH} {HEIGHT}\" font-family=\"sans-serif\" font-size=\"13\">\n"
    ));
    svg.push_str(&format!(
        "<rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>\n"
    ));
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"20\" text-anchor=\"middle\" font-size=\"16\">{}</text>\n",
        WIDTH / 2.0,
        escape(title)
    ));

    // Axes.
    svg.push_str(&format!(
        "<line x1=\"{MARGIN_L}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n",
        HEIGHT - MARGIN_B,
        WIDTH - MARGIN_R,
        HEIGHT - MARGIN_B
    ));
    svg.push_str(&format!(
        "<line x1=\"{MARGIN_L}\" y1=\"{MARGIN_T}\" x2=\"{MARGIN_L}\" y2=\"{}\" stroke=\"black\"/>\n",
        HEIGHT - MARGIN_B
    ));

    for i in 0..=5 {
        let fx = x_min + (x_max - x_min) * i as f64 / 5.0;
        let px = sx(fx);
        svg.push_str(&format!(
            "<line x1=\"{px}\" y1=\"{}\" x2=\"{px}\" y2=\"{}\" stroke=\"black\"/>\n",
            HEIGHT - MARGIN_B,
            HEIGHT - MARGIN_B + 5.0
        ));
        svg.push_str(&format!(
            "<text x=\"{px}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n",
            HEIGHT - MARGIN_B + 20.0,
            format_tick(fx)
        ));
        let fy = y_min + (y_max - y_min) * i as f64 / 5.0;
        let py = sy(fy);
        svg.push_str(&format!(
            "<line x1=\"{}\" y1=\"{py}\" x2=\"{MARGIN_L}\" y2=\"{py}\" stroke=\"black\"/>\n",
            MARGIN_L - 5.0
        ));
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" text-anchor=\"end\">{}</text>\n",
            MARGIN_L - 9.0,
            py + 4.0,
            format_tick(fy)
        ));
        svg.push_str(&format!(
            "<line x1=\"{MARGIN_L}\" y1=\"{py}\" x2=\"{}\" y2=\"{py}\" stroke=\"#dddddd\"/>\n",
            WIDTH - MARGIN_R
        ));
    }
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n",
        MARGIN_L + plot_w / 2.0,
        HEIGHT - 12.0,
        escape(x_label)
    ));
    svg.push_str(&format!(
        "<text x=\"16\" y=\"{}\" text-anchor=\"middle\" transform=\"rotate(-90 16 {})\">{}</text>\n",
        MARGIN_T + plot_h / 2.0,
        MARGIN_T + plot_h / 2.0,
        escape(y_label)
    ));

    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let mut points = String::new();
        for (&x, &y) in s.x.iter().zip(&s.y) {
            points.push_str(&format!("{:.2},{:.2} ", sx(x), sy(y)));
        }
        let dash = if s.dashed { " stroke-dasharray=\"7,5\"" } else { "" };
        svg.push_str(&format!(
            "<polyline points=\"{points}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.8\"{dash}/>\n"
        ));
        let ly = MARGIN_T + 18.0 * i as f64 + 8.0;
        let lx = WIDTH - MARGIN_R - 210.0;
        svg.push_str(&format!(
            "<line x1=\"{lx}\" y1=\"{ly}\" x2=\"{}\" y2=\"{ly}\" stroke=\"{color}\" stroke-width=\"2\"{dash}/>\n",
            lx + 26.0
        ));
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\">{}</text>\n",
            lx + 32.0,
            ly + 4.0,
            escape(&s.label)
        ));
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

fn format_tick(v: f64) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    let a = v.abs();
    if a >= 1000.0 || a < 0.01 {
        format!("{v:.1e}")
    } else if a >= 10.0 {
        format!("{v:.0}")
    } else {
        format!("{v:.2}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Centered moving average matching the training-curve smoothing.
pub fn smooth(values: &[f64], window: usize) -> Vec<f64> {
    let n = values.len();
    let half = window / 2;
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(n);
            values[lo..hi].iter().sum::<f64>() / (hi - lo) as f64
        })
        .collect()
}

/// Detects the CSV schema and builds the figure: training logs become
/// smoothed reward curves (one per input); trajectory dumps become a joint
/// tracking figure with dashed references.
pub fn plot_inputs(inputs: &[std::path::PathBuf], out: &Path) -> Result<()> {
    if inputs.is_empty() {
        bail!("no input files");
    }
    let first = NumericCsv::read(&inputs[0])?;
    let svg = if first.columns.iter().any(|c| c == "mean_reward") {
        first.require_columns(&["iteration", "mean_reward"])?;
        let mut series = Vec::new();
        for path in inputs {
            let csv = NumericCsv::read(path)?;
            csv.require_columns(&["iteration", "mean_reward"])?;
            let x = csv.column("iteration")?;
            let y = smooth(&csv.column("mean_reward")?, 51);
            let label = path
                .parent()
                .and_then(|p| p.file_name())
                .map(|s| s.to_string_lossy().to_string())
                .unwrap_or_else(|| path.display().to_string());
            series.push(Series { label, x, y, dashed: false });
        }
        render_svg("Reward growth", "iteration", "smoothed mean reward", &series)?
    } else if first.columns.iter().any(|c| c == "q_0") {
        first.require_columns(&["t", "q_0", "qref_0"])?;
        // First episode only, both hips when present.
        let idx = first.column_index();
        let episodes = first.column("episode").unwrap_or_else(|_| vec![0.0; first.rows.len()]);
        let rows: Vec<&Vec<f64>> = first
            .rows
            .iter()
            .zip(&episodes)
            .filter(|(_, e)| **e == episodes[0])
            .map(|(r, _)| r)
            .collect();
        let t: Vec<f64> = rows.iter().map(|r| r[idx["t"]]).collect();
        let mut series = Vec::new();
        let mut add_pair = |q: &str, qref: &str, name: &str| {
            if let (Some(&qi), Some(&ri)) = (idx.get(q), idx.get(qref)) {
                series.push(Series {
                    label: format!("{name} policy"),
                    x: t.clone(),
                    y: rows.iter().map(|r| r[qi]).collect(),
                    dashed: false,
                });
                series.push(Series {
                    label: format!("{name} reference"),
                    x: t.clone(),
                    y: rows.iter().map(|r| r[ri]).collect(),
                    dashed: true,
                });
            }
        };
        add_pair("q_0", "qref_0", "left hip");
        add_pair("q_3", "qref_3", "right hip");
        render_svg("Hip joint tracking", "time (s)", "joint angle (rad)", &series)?
    } else {
        bail!(
            "unrecognized CSV schema in {}: expected a training log (iteration, mean_reward) \
             or a trajectory dump (t, q_0, qref_0)",
            inputs[0].display()
        );
    };
    std::fs::write(out, svg)?;
    Ok(())
}
