//! SVG output: maze drawings, metric scatter plots, box plots.

use std::fmt::Write;

use crate::geometry::{Cell, Direction};
use crate::maze::{Maze, SignKind};

const CELL: f64 = 24.0;
const MARGIN: f64 = 8.0;

fn sign_color(kind: SignKind) -> &'static str {
    match kind {
        SignKind::Clue => "#2a9d3a",
        SignKind::Lure => "#d08a00",
        SignKind::Trap => "#c8312b",
    }
}

/// Renders a maze with north up. `trajectory`, when given, is drawn as a
/// polyline through cell centers.
pub fn maze_svg(maze: &Maze, trajectory: Option<&[Cell]>) -> String {
    let (w, h) = (maze.width(), maze.height());
    let width = w as f64 * CELL + 2.0 * MARGIN;
    let height = h as f64 * CELL + 2.0 * MARGIN;
    // Cell (x, y) has its south-west corner at screen (left, bottom).
    let left = |x: u32| MARGIN + x as f64 * CELL;
    let top = |y: u32| MARGIN + (h - 1 - y) as f64 * CELL;
    let center = |c: Cell| (left(c.x) + CELL / 2.0, top(c.y) + CELL / 2.0);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">"#
    );
    let _ = writeln!(svg, r#"<title>{}</title>"#, maze.descriptor());
    let _ = writeln!(svg, r##"<rect width="{width}" height="{height}" fill="#ffffff"/>"##);
    for (cell, colour) in [(maze.start(), "#cfe3ff"), (maze.goal(), "#ffe7a8")] {
        let _ = writeln!(
            svg,
            r#"<rect x="{}" y="{}" width="{CELL}" height="{CELL}" fill="{colour}"/>"#,
            left(cell.x),
            top(cell.y)
        );
    }
    for (cell, sign) in maze.signs() {
        let (cx, cy) = center(cell);
        let r = CELL * 0.32;
        let (dx, dy) = match sign.direction {
            Direction::East => (1.0, 0.0),
            Direction::North => (0.0, -1.0),
            Direction::West => (-1.0, 0.0),
            Direction::South => (0.0, 1.0),
        };
        let tip = (cx + dx * r, cy + dy * r);
        let b1 = (cx - dx * r * 0.6 - dy * r * 0.8, cy - dy * r * 0.6 + dx * r * 0.8);
        let b2 = (cx - dx * r * 0.6 + dy * r * 0.8, cy - dy * r * 0.6 - dx * r * 0.8);
        let _ = writeln!(
            svg,
            r#"<polygon class="{:?}" points="{:.2},{:.2} {:.2},{:.2} {:.2},{:.2}" fill="{}" fill-opacity="{}"/>"#,
            sign.kind,
            tip.0,
            tip.1,
            b1.0,
            b1.1,
            b2.0,
            b2.1,
            sign_color(sign.kind),
            sign.glyph.value()
        );
    }
    if let Some(path) = trajectory.filter(|p| !p.is_empty()) {
        let points: Vec<String> = path
            .iter()
            .map(|&c| {
                let (x, y) = center(c);
                format!("{x:.1},{y:.1}")
            })
            .collect();
        let _ = writeln!(
            svg,
            r##"<polyline points="{}" fill="none" stroke="#3050d0" stroke-width="2" stroke-opacity="0.7"/>"##,
            points.join(" ")
        );
    }
    let mut d = String::new();
    for y in 0..h {
        for x in 0..w {
            let cell = Cell { x, y };
            let (l, t) = (left(x), top(y));
            if maze.has_wall(cell, Direction::North) {
                let _ = write!(d, "M{l} {t}h{CELL}");
            }
            if maze.has_wall(cell, Direction::West) {
                let _ = write!(d, "M{l} {t}v{CELL}");
            }
            if y == 0 && maze.has_wall(cell, Direction::South) {
                let _ = write!(d, "M{l} {}h{CELL}", t + CELL);
            }
            if x == w - 1 && maze.has_wall(cell, Direction::East) {
                let _ = write!(d, "M{} {t}v{CELL}", l + CELL);
            }
        }
    }
    let _ = writeln!(
        svg,
        r##"<path d="{d}" stroke="#000000" stroke-width="2" stroke-linecap="square" fill="none"/>"##
    );
    svg.push_str("</svg>\n");
    svg
}

fn bounds(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if !lo.is_finite() {
        (0.0, 1.0)
    } else if hi - lo < 1e-9 {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    }
}

const PALETTE: [&str; 6] = ["#1b9e77", "#d95f02", "#7570b3", "#e7298a", "#66a61e", "#e6ab02"];

/// A labelled group of (x, y) points.
pub struct Series<'a> {
    pub label: &'a str,
    pub points: &'a [(f64, f64)],
}

/// Scatter plot with marginal histograms on the top and right edges.
pub fn scatter_with_marginals(series: &[Series<'_>], x_label: &str, y_label: &str) -> String {
    let (pw, ph, m, marg) = (480.0, 360.0, 50.0, 70.0);
    let width = m + pw + marg + 120.0;
    let height = marg + ph + m;
    let (x0, x1) = bounds(series.iter().flat_map(|s| s.points.iter().map(|p| p.0)));
    let (y0, y1) = bounds(series.iter().flat_map(|s| s.points.iter().map(|p| p.1)));
    let sx = |x: f64| m + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| marg + ph - (y - y0) / (y1 - y0) * ph;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(svg, r##"<rect width="{width}" height="{height}" fill="#ffffff"/>"##);
    let _ = writeln!(
        svg,
        r##"<rect x="{m}" y="{marg}" width="{pw}" height="{ph}" fill="none" stroke="#444444"/>"##
    );
    let _ = writeln!(svg, r#"<text x="{}" y="{}" text-anchor="middle">{x_label}</text>"#, m + pw / 2.0, height - 12.0);
    let _ = writeln!(
        svg,
        r#"<text x="14" y="{}" text-anchor="middle" transform="rotate(-90 14 {})">{y_label}</text>"#,
        marg + ph / 2.0,
        marg + ph / 2.0
    );
    for (v, anchor) in [(x0, "start"), (x1, "end")] {
        let _ = writeln!(svg, r#"<text x="{}" y="{}" text-anchor="{anchor}">{v:.2}</text>"#, sx(v), marg + ph + 14.0);
    }
    for v in [y0, y1] {
        let _ = writeln!(svg, r#"<text x="{}" y="{}" text-anchor="end">{v:.2}</text>"#, m - 4.0, sy(v) + 4.0);
    }

    const BINS: usize = 30;
    let bin = |v: f64, lo: f64, hi: f64| (((v - lo) / (hi - lo) * BINS as f64) as usize).min(BINS - 1);
    for (i, s) in series.iter().enumerate() {
        let colour = PALETTE[i % PALETTE.len()];
        for &(x, y) in s.points {
            let _ = writeln!(
                svg,
                r#"<circle cx="{:.2}" cy="{:.2}" r="2" fill="{colour}" fill-opacity="0.5"/>"#,
                sx(x),
                sy(y)
            );
        }
        let mut hx = [0usize; BINS];
        let mut hy = [0usize; BINS];
        for &(x, y) in s.points {
            hx[bin(x, x0, x1)] += 1;
            hy[bin(y, y0, y1)] += 1;
        }
        let n = s.points.len().max(1) as f64;
        let mut top = format!("M{m} {marg}");
        let mut right = format!("M{} {}", m + pw, marg + ph);
        for b in 0..BINS {
            let fx = m + b as f64 * pw / BINS as f64;
            let fy = marg + ph - b as f64 * ph / BINS as f64;
            let hxv = hx[b] as f64 / n * (marg - 6.0) * 2.0;
            let hyv = hy[b] as f64 / n * (marg - 6.0) * 2.0;
            let _ = write!(top, "L{fx:.2} {:.2}h{:.2}", marg - hxv.min(marg - 4.0), pw / BINS as f64);
            let _ = write!(right, "L{:.2} {fy:.2}v{:.2}", m + pw + hyv.min(marg - 4.0), -ph / BINS as f64);
        }
        let _ = writeln!(
            svg,
            r#"<path d="{top}" fill="none" stroke="{colour}"/><path d="{right}" fill="none" stroke="{colour}"/>"#
        );
        let ly = marg + 14.0 * i as f64;
        let lx = m + pw + marg + 10.0;
        let _ = writeln!(
            svg,
            r#"<rect x="{lx}" y="{}" width="10" height="10" fill="{colour}"/><text x="{}" y="{}">{}</text>"#,
            ly - 9.0,
            lx + 14.0,
            ly,
            s.label
        );
    }
    svg.push_str("</svg>\n");
    svg
}

/// Five-number summary used by the box plot: min, q1, median, q3, max.
pub fn five_numbers(values: &[f64]) -> Option<[f64; 5]> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let q = |p: f64| {
        let pos = p * (v.len() - 1) as f64;
        let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
        v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
    };
    Some([v[0], q(0.25), q(0.5), q(0.75), v[v.len() - 1]])
}

/// One box per labelled group.
pub fn box_plot(groups: &[(String, Vec<f64>)], y_label: &str) -> String {
    let (m, ph, slot) = (50.0, 300.0, 70.0);
    let width = m + slot * groups.len().max(1) as f64 + 20.0;
    let height = ph + 2.0 * m + 20.0;
    let (y0, y1) = bounds(groups.iter().flat_map(|(_, v)| v.iter().copied()));
    let sy = |y: f64| m + ph - (y - y0) / (y1 - y0) * ph;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(svg, r##"<rect width="{width}" height="{height}" fill="#ffffff"/>"##);
    let _ = writeln!(
        svg,
        r#"<text x="14" y="{}" text-anchor="middle" transform="rotate(-90 14 {})">{y_label}</text>"#,
        m + ph / 2.0,
        m + ph / 2.0
    );
    for v in [y0, y1] {
        let _ = writeln!(svg, r#"<text x="{}" y="{}" text-anchor="end">{v:.2}</text>"#, m - 4.0, sy(v) + 4.0);
    }
    for (i, (label, values)) in groups.iter().enumerate() {
        let cx = m + slot * (i as f64 + 0.5);
        let colour = PALETTE[i % PALETTE.len()];
        if let Some([lo, q1, med, q3, hi]) = five_numbers(values) {
            let _ = writeln!(
                svg,
                r##"<line x1="{cx}" x2="{cx}" y1="{:.2}" y2="{:.2}" stroke="#444444"/>"##,
                sy(lo),
                sy(hi)
            );
            let _ = writeln!(
                svg,
                r##"<rect x="{}" y="{:.2}" width="{}" height="{:.2}" fill="{colour}" fill-opacity="0.6" stroke="#444444"/>"##,
                cx - slot * 0.3,
                sy(q3),
                slot * 0.6,
                (sy(q1) - sy(q3)).max(0.5)
            );
            let _ = writeln!(
                svg,
                r##"<line x1="{}" x2="{}" y1="{:.2}" y2="{:.2}" stroke="#000000" stroke-width="2"/>"##,
                cx - slot * 0.3,
                cx + slot * 0.3,
                sy(med),
                sy(med)
            );
        }
        let _ = writeln!(
            svg,
            r#"<text x="{cx}" y="{}" text-anchor="middle">{label}</text>"#,
            m + ph + 16.0
        );
    }
    svg.push_str("</svg>\n");
    svg
}
