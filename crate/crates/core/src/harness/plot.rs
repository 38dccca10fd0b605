//! SVG rendering of a [`RunReport`]. Presentation only.

use std::path::Path;

use plotters::coord::Shift;
use plotters::prelude::*;

use super::{Algorithm, HarnessError, RunReport};
use crate::metrics::MetricsSample;

type Line = (String, Vec<(f64, f64)>);
type Metric = fn(&MetricsSample) -> f64;

const PALETTE: [RGBColor; 6] = [
    RGBColor(31, 119, 180),
    RGBColor(214, 39, 40),
    RGBColor(44, 160, 44),
    RGBColor(255, 127, 14),
    RGBColor(148, 103, 189),
    RGBColor(140, 86, 75),
];

fn plot_err<E: std::fmt::Display>(e: E) -> HarnessError {
    HarnessError::Plot(e.to_string())
}

fn panel(
    area: &DrawingArea<SVGBackend<'_>, Shift>,
    title: &str,
    x_label: &str,
    lines: &[Line],
) -> Result<(), HarnessError> {
    let points = lines.iter().flat_map(|(_, p)| p.iter());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for &(x, y) in points {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if x0 > x1 {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    if x1 - x0 < 1e-12 {
        x1 = x0 + 1.0;
    }
    let pad = ((y1 - y0) * 0.05).max(1e-6);
    let mut chart = ChartBuilder::on(area)
        .caption(title, ("sans-serif", 18))
        .margin(12)
        .x_label_area_size(36)
        .y_label_area_size(56)
        .build_cartesian_2d(x0..x1, (y0 - pad)..(y1 + pad))
        .map_err(plot_err)?;
    chart
        .configure_mesh()
        .x_desc(x_label)
        .draw()
        .map_err(plot_err)?;
    for (i, (label, pts)) in lines.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        chart
            .draw_series(LineSeries::new(pts.iter().copied(), color.stroke_width(2)))
            .map_err(plot_err)?
            .label(label.as_str())
            .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 18, y)], color.stroke_width(2)));
    }
    if lines.len() > 1 {
        chart
            .configure_series_labels()
            .background_style(WHITE.mix(0.8))
            .border_style(BLACK)
            .draw()
            .map_err(plot_err)?;
    }
    Ok(())
}

fn figure(path: &Path, panels: &[(&str, &str, Vec<Line>)]) -> Result<(), HarnessError> {
    let width = 520 * panels.len() as u32;
    let root = SVGBackend::new(path, (width, 400)).into_drawing_area();
    root.fill(&WHITE).map_err(plot_err)?;
    for (area, (title, x_label, lines)) in root.split_evenly((1, panels.len())).iter().zip(panels) {
        panel(area, title, x_label, lines)?;
    }
    root.present().map_err(plot_err)
}

fn over_time(report: &RunReport, algorithm: Algorithm, cap: f64, metric: Metric) -> Vec<(f64, f64)> {
    report
        .run(algorithm, cap)
        .map(|r| r.series.samples().iter().map(|s| (s.time, metric(s))).collect())
        .unwrap_or_default()
}

/// Writes `training.svg`, `revenue.svg`, `acceptance.svg`, `rc_ratio.svg`
/// and `comparison.svg` into `out_dir`.
pub fn emit_plots(report: &RunReport, out_dir: &Path) -> Result<(), HarnessError> {
    std::fs::create_dir_all(out_dir).map_err(|source| HarnessError::Io {
        path: out_dir.to_path_buf(),
        source,
    })?;
    let epochs = &report.training.epochs;
    let curve = |f: fn(&super::EpochMetrics) -> f64| -> Vec<Line> {
        vec![("drl".to_string(), epochs.iter().map(|e| (e.epoch as f64, f(e))).collect())]
    };
    figure(
        &out_dir.join("training.svg"),
        &[
            ("Average revenue", "epoch", curve(|e| e.avg_revenue)),
            ("Acceptance rate", "epoch", curve(|e| e.acceptance)),
            ("Revenue / cost", "epoch", curve(|e| e.rc_ratio)),
        ],
    )?;

    let metrics: [(&str, &str, Metric); 3] = [
        ("revenue.svg", "Average revenue", MetricsSample::average_revenue),
        ("acceptance.svg", "Acceptance rate", MetricsSample::acceptance_rate),
        ("rc_ratio.svg", "Revenue / cost", MetricsSample::revenue_cost_ratio),
    ];
    let lead = report
        .runs
        .first()
        .map_or(Algorithm::Drl, |r| r.algorithm);
    for (file, title, metric) in metrics {
        let lines: Vec<Line> = report
            .config
            .delay_caps
            .iter()
            .map(|&cap| (format!("cap {cap}"), over_time(report, lead, cap, metric)))
            .collect();
        figure(&out_dir.join(file), &[(title, "time", lines)])?;
    }

    let cap = report.config.delay_caps[0];
    let algorithms: Vec<Algorithm> = Algorithm::ALL
        .into_iter()
        .filter(|a| report.run(*a, cap).is_some())
        .collect();
    let by_algorithm = |metric: Metric| -> Vec<Line> {
        algorithms
            .iter()
            .map(|&a| (a.to_string(), over_time(report, a, cap, metric)))
            .collect()
    };
    figure(
        &out_dir.join("comparison.svg"),
        &[
            ("Average revenue", "time", by_algorithm(MetricsSample::average_revenue)),
            ("Acceptance rate", "time", by_algorithm(MetricsSample::acceptance_rate)),
            ("Revenue / cost", "time", by_algorithm(MetricsSample::revenue_cost_ratio)),
        ],
    )
}
