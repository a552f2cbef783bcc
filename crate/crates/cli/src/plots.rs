//! Report figures: confusion heatmap, envelope traces, PLV significance grid.

use neuroprint::eval::EvalReport;
use neuroprint::neurofeat::{ContrastResult, Direction, EnvelopeSummary};

use crate::svg::{diverging, palette, sequential, Scale, Svg};

pub fn confusion_svg(report: &EvalReport, title: &str) -> String {
    let norm = report.normalized_confusion();
    let n = norm.len();
    let cell = 40.0;
    let (left, top) = (70.0, 60.0);
    let size = cell * n as f64;
    let mut svg = Svg::new(left + size + 20.0, top + size + 50.0);
    svg.text(left + size / 2.0, 24.0, 13.0, "middle", title);
    for (i, row) in norm.iter().enumerate() {
        let y = top + cell * i as f64;
        svg.text(left - 8.0, y + cell / 2.0 + 4.0, 10.0, "end", &format!("S{i}"));
        for (j, &v) in row.iter().enumerate() {
            let x = left + cell * j as f64;
            svg.rect(x, y, cell, cell, &sequential(v), Some("#cccccc"));
            if report.confusion[i][j] > 0 {
                let ink = if v > 0.5 { "#ffffff" } else { "#000000" };
                svg.text_ink(x + cell / 2.0, y + cell / 2.0 + 4.0, 9.0, "middle", ink, &format!("{:.0}", 100.0 * v));
            }
        }
    }
    for j in 0..n {
        svg.text(left + cell * (j as f64 + 0.5), top + size + 16.0, 10.0, "middle", &format!("S{j}"));
    }
    svg.text(left + size / 2.0, top + size + 36.0, 11.0, "middle", "predicted subject");
    svg.vtext(16.0, top + size / 2.0, 11.0, "true subject");
    svg.finish()
}

pub fn envelope_svg(summaries: &[EnvelopeSummary], title: &str) -> String {
    let (w, h) = (720.0, 400.0);
    let (left, right, top, bottom) = (70.0, 130.0, 40.0, 50.0);
    let mut svg = Svg::new(w, h);
    svg.text((left + w - right) / 2.0, 24.0, 13.0, "middle", title);

    let t_min = summaries.iter().filter_map(|s| s.times_ms.first()).copied().fold(f64::INFINITY, f64::min);
    let t_max = summaries.iter().filter_map(|s| s.times_ms.last()).copied().fold(f64::NEG_INFINITY, f64::max);
    let finite = |v: &f64| v.is_finite();
    let y_min = summaries.iter().flat_map(|s| s.lower.iter()).copied().filter(finite).fold(f64::INFINITY, f64::min);
    let y_max = summaries.iter().flat_map(|s| s.upper.iter()).copied().filter(finite).fold(f64::NEG_INFINITY, f64::max);
    let (y_min, y_max) = if y_min <= y_max { (y_min, y_max) } else { (0.0, 1.0) };
    let xs = Scale::new((t_min, t_max), (left, w - right));
    let ys = Scale::new((y_min, y_max), (h - bottom, top));

    svg.rect(left, top, w - right - left, h - bottom - top, "none", Some("#888888"));
    if t_min < 0.0 && t_max > 0.0 {
        svg.line(xs.map(0.0), top, xs.map(0.0), h - bottom, "#444444", 1.0);
    }
    if y_min < 0.0 && y_max > 0.0 {
        svg.line(left, ys.map(0.0), w - right, ys.map(0.0), "#bbbbbb", 0.8);
    }
    for (k, s) in summaries.iter().enumerate() {
        let color = palette(k);
        let mut band: Vec<(f64, f64)> = s.times_ms.iter().zip(&s.upper).map(|(&t, &u)| (xs.map(t), ys.map(u))).collect();
        band.extend(s.times_ms.iter().zip(&s.lower).rev().map(|(&t, &l)| (xs.map(t), ys.map(l))));
        svg.polygon(&band, color, 0.15);
        let line: Vec<(f64, f64)> = s.times_ms.iter().zip(&s.mean).map(|(&t, &m)| (xs.map(t), ys.map(m))).collect();
        svg.polyline(&line, color, 1.2);
        let ly = top + 16.0 * k as f64 + 8.0;
        svg.line(w - right + 12.0, ly, w - right + 32.0, ly, color, 2.0);
        svg.text(w - right + 38.0, ly + 4.0, 10.0, "start", &format!("S{} (n={})", s.subject, s.n_trials));
    }
    svg.text(left, h - bottom + 16.0, 10.0, "middle", &format!("{t_min:.0}"));
    svg.text(w - right, h - bottom + 16.0, 10.0, "middle", &format!("{t_max:.0}"));
    svg.text(left - 6.0, ys.map(y_max) + 4.0, 10.0, "end", &format!("{y_max:.2}"));
    svg.text(left - 6.0, ys.map(y_min) + 4.0, 10.0, "end", &format!("{y_min:.2}"));
    svg.text((left + w - right) / 2.0, h - 14.0, 11.0, "middle", "time from onset (ms)");
    svg.vtext(18.0, (top + h - bottom) / 2.0, 11.0, "envelope change (uV)");
    svg.finish()
}

/// Lower triangle of the channel grid. Significant pairs are colored by the
/// sign and size of the PLV change; others stay grey.
pub fn plv_svg(result: &ContrastResult, labels: &[String], title: &str) -> String {
    let n = labels.len();
    let cell = 36.0;
    let (left, top) = (60.0, 50.0);
    let size = cell * n as f64;
    let mut svg = Svg::new(left + size + 20.0, top + size + 60.0);
    svg.text(left + size / 2.0, 24.0, 13.0, "middle", title);
    let max_diff = result
        .pairs
        .iter()
        .map(|p| p.mean_difference.abs())
        .filter(|v| v.is_finite())
        .fold(0.0, f64::max);
    for (i, li) in labels.iter().enumerate() {
        let y = top + cell * i as f64;
        svg.text(left - 6.0, y + cell / 2.0 + 4.0, 10.0, "end", li);
        for (j, lj) in labels.iter().enumerate().take(i) {
            let x = left + cell * j as f64;
            let Some(pc) = result.get(li, lj) else { continue };
            let fill = if pc.significant && max_diff > 0.0 {
                diverging(pc.mean_difference / max_diff)
            } else {
                "#eeeeee".to_string()
            };
            svg.rect(x, y, cell, cell, &fill, Some("#cccccc"));
            if pc.significant {
                let mark = match pc.direction {
                    Direction::Increase => "+",
                    Direction::Decrease => "-",
                    Direction::None => "",
                };
                svg.text(x + cell / 2.0, y + cell / 2.0 + 4.0, 11.0, "middle", mark);
            }
        }
    }
    for (j, lj) in labels.iter().enumerate() {
        svg.text(left + cell * (j as f64 + 0.5), top + size + 16.0, 10.0, "middle", lj);
    }
    svg.text(
        left + size / 2.0,
        top + size + 40.0,
        10.0,
        "middle",
        &format!("p < {} ({} significant of {})", result.alpha, result.n_significant(), result.pairs.len()),
    );
    svg.finish()
}
