//! Static SVG line charts for trajectories.

use std::fmt::Write as _;

use buffered_flow::diagnostics::Trajectory;

const WIDTH: f64 = 640.0;
const PANEL: f64 = 240.0;
const MARGIN: f64 = 56.0;

struct Series<'a> {
    title: &'a str,
    points: Vec<(f64, f64)>,
}

/// Distance to equilibrium (log scale) above total mass.
pub fn trajectory_svg(traj: &Trajectory) -> String {
    let mut panels = Vec::new();
    let distance: Vec<(f64, f64)> = traj
        .rows
        .iter()
        .filter_map(|r| r.distance.filter(|d| *d > 0.0).map(|d| (r.t, d.log10())))
        .collect();
    if !distance.is_empty() {
        panels.push(Series {
            title: "log10 distance to equilibrium",
            points: distance,
        });
    }
    panels.push(Series {
        title: "total mass",
        points: traj.rows.iter().map(|r| (r.t, r.total_mass)).collect(),
    });

    let height = PANEL * panels.len() as f64;
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{height}" viewBox="0 0 {WIDTH} {height}" font-family="sans-serif" font-size="11">"#
    );
    svg.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    for (i, series) in panels.iter().enumerate() {
        panel(&mut svg, series, i as f64 * PANEL);
    }
    svg.push_str("</svg>\n");
    svg
}

fn bounds(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if hi - lo > 1e-12 * hi.abs().max(1.0) {
        (lo, hi)
    } else {
        (lo - 0.5, hi + 0.5)
    }
}

fn panel(svg: &mut String, series: &Series, top: f64) {
    let (x0, x1) = bounds(series.points.iter().map(|p| p.0));
    let (y0, y1) = bounds(series.points.iter().map(|p| p.1));
    let left = MARGIN;
    let right = WIDTH - 16.0;
    let upper = top + 28.0;
    let lower = top + PANEL - 32.0;
    let sx = |x: f64| left + (x - x0) / (x1 - x0) * (right - left);
    let sy = |y: f64| lower - (y - y0) / (y1 - y0) * (lower - upper);

    let _ = writeln!(svg, r#"<text x="{left}" y="{:.1}">{}</text>"#, top + 18.0, series.title);
    let _ = writeln!(
        svg,
        r##"<rect x="{left}" y="{upper:.1}" width="{:.1}" height="{:.1}" fill="none" stroke="#888"/>"##,
        right - left,
        lower - upper
    );
    for (value, y) in [(y0, lower), (y1, upper)] {
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#,
            left - 4.0,
            y + 4.0,
            tick(value)
        );
    }
    for (value, x, anchor) in [(x0, left, "start"), (x1, right, "end")] {
        let _ = writeln!(
            svg,
            r#"<text x="{x:.1}" y="{:.1}" text-anchor="{anchor}">t = {}</text>"#,
            lower + 16.0,
            tick(value)
        );
    }
    let mut path = String::new();
    for (x, y) in &series.points {
        let _ = write!(path, "{:.2},{:.2} ", sx(*x), sy(*y));
    }
    let _ = writeln!(
        svg,
        r##"<polyline fill="none" stroke="#1f5fa8" stroke-width="1.2" points="{}"/>"##,
        path.trim_end()
    );
}

fn tick(v: f64) -> String {
    if v != 0.0 && (v.abs() >= 1e4 || v.abs() < 1e-2) {
        format!("{v:.2e}")
    } else {
        format!("{v:.3}")
    }
}
