//! SVG heatmaps of sweep tables, one file per (transmission, recovery) panel.
//!
//! Output depends only on the table: numbers are printed at fixed precision
//! and panels are visited in sorted order.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{CliError, Result};
use crate::sweep::SweepRow;

const CELL: f64 = 24.0;
const LEFT: f64 = 70.0;
const TOP: f64 = 40.0;
const LEGEND_GAP: f64 = 30.0;
const LEGEND_WIDTH: f64 = 16.0;
const MISSING: &str = "#bdbdbd";

/// A panel laid out on its grid: `values[i][j]` sits at `(xs[i], ys[j])`.
#[derive(Clone, Debug, PartialEq)]
pub struct Panel {
    pub trans: String,
    pub rec: String,
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    pub values: Vec<Vec<Option<f64>>>,
}

impl Panel {
    pub fn from_rows(rows: &[SweepRow], trans: &str, rec: &str) -> Result<Self> {
        let mine: Vec<&SweepRow> = rows
            .iter()
            .filter(|r| r.panel_trans == trans && r.panel_rec == rec)
            .collect();
        if mine.is_empty() {
            return Err(CliError::Usage(format!("no rows for panel {trans}:{rec}")));
        }
        let sorted = |f: fn(&SweepRow) -> f64| -> Vec<f64> {
            let set: BTreeSet<u64> = mine.iter().map(|r| f(r).to_bits()).collect();
            let mut v: Vec<f64> = set.into_iter().map(f64::from_bits).collect();
            v.sort_by(f64::total_cmp);
            v
        };
        let xs = sorted(|r| r.mu_t);
        let ys = sorted(|r| r.mu_r_norm);
        let mut values = vec![vec![None; ys.len()]; xs.len()];
        for r in mine {
            let i = xs.iter().position(|x| x.to_bits() == r.mu_t.to_bits()).expect("x on grid");
            let j = ys.iter().position(|y| y.to_bits() == r.mu_r_norm.to_bits()).expect("y on grid");
            values[i][j] = r.bound_rate.filter(|v| v.is_finite());
        }
        Ok(Panel {
            trans: trans.to_string(),
            rec: rec.to_string(),
            xs,
            ys,
            values,
        })
    }

    /// Zero level set as segments in grid-index coordinates.
    pub fn zero_contour(&self) -> Vec<[(f64, f64); 2]> {
        marching_squares(&self.values)
    }

    pub fn to_svg(&self) -> String {
        let nx = self.xs.len();
        let ny = self.ys.len();
        let plot_w = nx as f64 * CELL;
        let plot_h = ny as f64 * CELL;
        let width = LEFT + plot_w + LEGEND_GAP + LEGEND_WIDTH + 70.0;
        let height = TOP + plot_h + 60.0;
        let scale = self
            .values
            .iter()
            .flatten()
            .flatten()
            .fold(0.0f64, |m, v| m.max(v.abs()));
        let scale = if scale > 0.0 { scale } else { 1.0 };
        // grid index to pixel; index j grows upward
        let px = |i: f64| LEFT + (i + 0.5) * CELL;
        let py = |j: f64| TOP + plot_h - (j + 0.5) * CELL;

        let mut s = String::new();
        let w = &mut s;
        let _ = writeln!(w, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
        let _ = writeln!(
            w,
            r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.0} {height:.0}" font-family="sans-serif" font-size="11">"#
        );
        let _ = writeln!(
            w,
            r#"<text x="{:.1}" y="20" text-anchor="middle" font-size="13">transmission {} / recovery {}: decay-rate bound</text>"#,
            LEFT + plot_w / 2.0,
            escape(&self.trans),
            escape(&self.rec)
        );
        let _ = writeln!(w, r#"<g id="cells" stroke="none">"#);
        for i in 0..nx {
            for j in 0..ny {
                let fill = self.values[i][j].map_or_else(|| MISSING.to_string(), |v| color(v / scale));
                let _ = writeln!(
                    w,
                    r#"<rect x="{:.2}" y="{:.2}" width="{CELL:.2}" height="{CELL:.2}" fill="{fill}"/>"#,
                    px(i as f64) - CELL / 2.0,
                    py(j as f64) - CELL / 2.0
                );
            }
        }
        let _ = writeln!(w, "</g>");

        let _ = writeln!(w, r#"<g id="zero-contour" stroke="black" stroke-width="2" fill="none">"#);
        for [(x0, y0), (x1, y1)] in self.zero_contour() {
            let _ = writeln!(
                w,
                r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}"/>"#,
                px(x0),
                py(y0),
                px(x1),
                py(y1)
            );
        }
        let _ = writeln!(w, "</g>");

        let _ = writeln!(w, r#"<g id="axes">"#);
        let _ = writeln!(
            w,
            r#"<rect x="{LEFT:.2}" y="{TOP:.2}" width="{plot_w:.2}" height="{plot_h:.2}" fill="none" stroke="black"/>"#
        );
        for i in ticks(nx) {
            let _ = writeln!(
                w,
                r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
                px(i as f64),
                TOP + plot_h + 14.0,
                label(self.xs[i])
            );
        }
        for j in ticks(ny) {
            let _ = writeln!(
                w,
                r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
                LEFT - 4.0,
                py(j as f64) + 4.0,
                label(self.ys[j])
            );
        }
        let _ = writeln!(
            w,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">μ</text>"#,
            LEFT + plot_w / 2.0,
            TOP + plot_h + 34.0
        );
        let _ = writeln!(
            w,
            r#"<text x="16" y="{:.2}" text-anchor="middle" transform="rotate(-90 16 {:.2})">μ / λmax</text>"#,
            TOP + plot_h / 2.0,
            TOP + plot_h / 2.0
        );
        let _ = writeln!(w, "</g>");

        let lx = LEFT + plot_w + LEGEND_GAP;
        let steps = 64;
        let _ = writeln!(w, r#"<g id="legend" stroke="none">"#);
        for k in 0..steps {
            let t = 1.0 - 2.0 * (k as f64 + 0.5) / steps as f64;
            let _ = writeln!(
                w,
                r#"<rect x="{lx:.2}" y="{:.2}" width="{LEGEND_WIDTH:.2}" height="{:.2}" fill="{}"/>"#,
                TOP + plot_h * k as f64 / steps as f64,
                plot_h / steps as f64 + 0.01,
                color(t)
            );
        }
        for (frac, value) in [(0.0, scale), (0.5, 0.0), (1.0, -scale)] {
            let _ = writeln!(
                w,
                r#"<text x="{:.2}" y="{:.2}">{}</text>"#,
                lx + LEGEND_WIDTH + 4.0,
                TOP + plot_h * frac + 4.0,
                label(value)
            );
        }
        let _ = writeln!(w, "</g>");
        let _ = writeln!(w, "</svg>");
        s
    }
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn label(v: f64) -> String {
    let s = format!("{v:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" { "0".into() } else { s.into() }
}

/// About six evenly spaced indices including both ends.
fn ticks(n: usize) -> Vec<usize> {
    let stride = n.div_ceil(6).max(1);
    let mut out: Vec<usize> = (0..n).step_by(stride).collect();
    if *out.last().expect("nonempty axis") != n - 1 {
        out.push(n - 1);
    }
    out
}

/// Diverging map on `[-1, 1]`: red below zero, white at zero, blue above.
fn color(t: f64) -> String {
    let t = t.clamp(-1.0, 1.0);
    let (lo, hi) = if t >= 0.0 {
        ([255.0, 255.0, 255.0], [33.0, 102.0, 172.0])
    } else {
        ([255.0, 255.0, 255.0], [178.0, 24.0, 43.0])
    };
    let a = t.abs();
    let c: Vec<u8> = (0..3).map(|k| (lo[k] + (hi[k] - lo[k]) * a).round() as u8).collect();
    format!("#{:02x}{:02x}{:02x}", c[0], c[1], c[2])
}

/// Segments of the zero level set of a gridded field, by marching squares.
/// Squares with a missing corner are skipped; saddles are split by the
/// sign of the corner average.
pub fn marching_squares(values: &[Vec<Option<f64>>]) -> Vec<[(f64, f64); 2]> {
    let mut out = Vec::new();
    let nx = values.len();
    let ny = values.first().map_or(0, Vec::len);
    for i in 0..nx.saturating_sub(1) {
        for j in 0..ny.saturating_sub(1) {
            let corners = [
                ((i, j), values[i][j]),
                ((i + 1, j), values[i + 1][j]),
                ((i + 1, j + 1), values[i + 1][j + 1]),
                ((i, j + 1), values[i][j + 1]),
            ];
            let Some(v): Option<Vec<f64>> = corners.iter().map(|c| c.1).collect() else {
                continue;
            };
            let positive = |x: f64| x > 0.0;
            // crossings on edges 0-1, 1-2, 2-3, 3-0
            let mut points = Vec::with_capacity(4);
            for e in 0..4 {
                let (a, b) = (e, (e + 1) % 4);
                if positive(v[a]) != positive(v[b]) {
                    let t = v[a] / (v[a] - v[b]);
                    let (pa, pb) = (corners[a].0, corners[b].0);
                    points.push((
                        pa.0 as f64 + t * (pb.0 as f64 - pa.0 as f64),
                        pa.1 as f64 + t * (pb.1 as f64 - pa.1 as f64),
                    ));
                }
            }
            match points.len() {
                2 => out.push([points[0], points[1]]),
                4 => {
                    let center = v.iter().sum::<f64>() / 4.0;
                    if positive(center) == positive(v[0]) {
                        out.push([points[0], points[3]]);
                        out.push([points[1], points[2]]);
                    } else {
                        out.push([points[0], points[1]]);
                        out.push([points[2], points[3]]);
                    }
                }
                _ => {}
            }
        }
    }
    out
}

/// Panels present in the table, sorted.
pub fn panels(rows: &[SweepRow]) -> Vec<(String, String)> {
    let set: BTreeSet<(String, String)> = rows
        .iter()
        .map(|r| (r.panel_trans.clone(), r.panel_rec.clone()))
        .collect();
    set.into_iter().collect()
}

pub fn file_name(trans: &str, rec: &str) -> String {
    format!("{trans}__{rec}.svg")
}

/// Writes one SVG per panel (or only `only`) into `out_dir`.
pub fn render_all(rows: &[SweepRow], out_dir: &Path, only: Option<(&str, &str)>) -> Result<Vec<PathBuf>> {
    let targets = match only {
        Some((t, r)) => vec![(t.to_string(), r.to_string())],
        None => panels(rows),
    };
    if targets.is_empty() {
        return Err(CliError::Usage("table has no rows to render".into()));
    }
    let rendered: BTreeMap<String, String> = targets
        .iter()
        .map(|(t, r)| Ok((file_name(t, r), Panel::from_rows(rows, t, r)?.to_svg())))
        .collect::<Result<_>>()?;
    std::fs::create_dir_all(out_dir).map_err(|e| CliError::io(out_dir, e))?;
    let mut written = Vec::new();
    for (name, svg) in rendered {
        let path = out_dir.join(name);
        std::fs::write(&path, svg).map_err(|e| CliError::io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(t: &str, r: &str, x: f64, y: f64, v: Option<f64>) -> SweepRow {
        SweepRow {
            panel_trans: t.into(),
            panel_rec: r.into(),
            mu_t: x,
            mu_r_norm: y,
            eta_a: v.map(|v| -v),
            bound_rate: v,
            fit_l1_trans: None,
            fit_l1_rec: None,
            graph_hash: "h".into(),
            seed: 0,
            error: None,
        }
    }

    fn diagonal_rows() -> Vec<SweepRow> {
        let grid = [0.5, 0.75, 1.0, 1.25, 1.5];
        let mut rows = Vec::new();
        for &x in &grid {
            for &y in &grid {
                rows.push(row("exp", "exp", x, y, Some(1.0 / y - 1.0 / x)));
            }
        }
        rows
    }

    #[test]
    fn contour_of_a_linear_field_is_exact() {
        // v = x - y - 0.5 on a unit grid
        let values: Vec<Vec<Option<f64>>> = (0..4)
            .map(|i| (0..4).map(|j| Some(i as f64 - j as f64 - 0.5)).collect())
            .collect();
        let segs = marching_squares(&values);
        assert!(!segs.is_empty());
        for [(x0, y0), (x1, y1)] in segs {
            assert!((x0 - y0 - 0.5).abs() < 1e-12);
            assert!((x1 - y1 - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn missing_and_constant_fields_have_no_contour() {
        assert!(marching_squares(&[vec![Some(1.0), Some(2.0)], vec![Some(3.0), None]]).is_empty());
        assert!(marching_squares(&vec![vec![Some(1.0); 3]; 3]).is_empty());
    }

    #[test]
    fn svg_is_deterministic_and_labelled() {
        let rows = diagonal_rows();
        let p = Panel::from_rows(&rows, "exp", "exp").unwrap();
        let a = p.to_svg();
        assert_eq!(a, Panel::from_rows(&rows, "exp", "exp").unwrap().to_svg());
        assert!(a.contains("μ / λmax"));
        assert!(a.contains(r#"<g id="zero-contour""#));
        assert_eq!(a.matches("<rect").count(), 25 + 64 + 1);
    }

    #[test]
    fn diagonal_zero_contour() {
        let p = Panel::from_rows(&diagonal_rows(), "exp", "exp").unwrap();
        for [(x0, y0), (x1, y1)] in p.zero_contour() {
            assert!((x0 - y0).abs() < 1e-9 && (x1 - y1).abs() < 1e-9);
        }
    }

    #[test]
    fn empty_panel_is_an_error() {
        assert!(Panel::from_rows(&diagonal_rows(), "exp", "ln2").is_err());
        assert!(render_all(&[], Path::new("unused"), None).is_err());
    }

    #[test]
    fn labels_and_colors() {
        assert_eq!(label(0.5), "0.5");
        assert_eq!(label(1.0), "1");
        assert_eq!(label(-0.0001), "0");
        assert_eq!(color(0.0), "#ffffff");
        assert_eq!(color(1.0), "#2166ac");
        assert_eq!(color(-1.0), "#b2182b");
        assert_eq!(ticks(21), vec![0, 4, 8, 12, 16, 20]);
    }
}
