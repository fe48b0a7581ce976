//! Static SVG rendering of a planar input measure and a fitted curve measure.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::length::CurveMeasure;
use crate::measure::DiscreteMeasure;

/// Canvas size in pixels; the longer data axis fills it minus the margin.
const SIZE: f64 = 640.0;
const MARGIN: f64 = 24.0;

struct Frame {
    x0: f64,
    y0: f64,
    scale: f64,
}

impl Frame {
    fn fit(xs: impl Iterator<Item = [f64; 2]>) -> Frame {
        let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
        for p in xs {
            for k in 0..2 {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
        let span = (hi[0] - lo[0]).max(hi[1] - lo[1]);
        let scale = if span > 0.0 { (SIZE - 2.0 * MARGIN) / span } else { 1.0 };
        Frame {
            x0: lo[0] - ((SIZE - 2.0 * MARGIN) / scale - (hi[0] - lo[0])) / 2.0,
            y0: hi[1] + ((SIZE - 2.0 * MARGIN) / scale - (hi[1] - lo[1])) / 2.0,
            scale,
        }
    }

    // y flips so the picture reads like a plot
    fn map(&self, p: [f64; 2]) -> (f64, f64) {
        (MARGIN + (p[0] - self.x0) * self.scale, MARGIN + (self.y0 - p[1]) * self.scale)
    }
}

fn xy(c: &[f64]) -> [f64; 2] {
    [c[0], c[1]]
}

/// Draws `rho` as grey dots (area ∝ weight) and `nu` as edges whose stroke
/// width follows the density, with atoms as red discs.
///
/// Only d = 2 is supported.
pub fn render_svg(rho: Option<&DiscreteMeasure>, nu: &CurveMeasure) -> Result<String> {
    if nu.dim() != 2 || rho.is_some_and(|r| r.dim() != 2) {
        return Err(Error::InvalidParameter("SVG output needs planar data (d = 2)".into()));
    }
    let graph = nu.graph();
    let pts = rho
        .into_iter()
        .flat_map(|r| r.points().iter().map(|p| xy(p.coords())))
        .chain(graph.vertices().iter().map(|v| xy(v.coords())));
    let frame = Frame::fit(pts);

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);

    if let Some(rho) = rho {
        let wmax = rho.weights().iter().copied().fold(0.0, f64::max);
        let _ = writeln!(out, r##"<g fill="#888" fill-opacity="0.6">"##);
        for (p, w) in rho.iter() {
            let (x, y) = frame.map(xy(p.coords()));
            let r = 1.0 + 3.0 * (w / wmax).sqrt();
            let _ = writeln!(out, r#"<circle cx="{x:.3}" cy="{y:.3}" r="{r:.3}"/>"#);
        }
        let _ = writeln!(out, "</g>");
    }

    let dmax = nu.edge_density().iter().copied().fold(0.0, f64::max);
    let _ = writeln!(out, r##"<g stroke="#1f5fa8" stroke-linecap="round">"##);
    for (e, &[a, b]) in graph.edges().iter().enumerate() {
        let (x1, y1) = frame.map(xy(graph.vertices()[a].coords()));
        let (x2, y2) = frame.map(xy(graph.vertices()[b].coords()));
        let w = if dmax > 0.0 { 1.0 + 4.0 * nu.edge_density()[e] / dmax } else { 1.0 };
        let _ = writeln!(
            out,
            r#"<line x1="{x1:.3}" y1="{y1:.3}" x2="{x2:.3}" y2="{y2:.3}" stroke-width="{w:.3}"/>"#
        );
    }
    let _ = writeln!(out, "</g>");

    let _ = writeln!(out, r##"<g fill="#c0392b">"##);
    for (v, &m) in graph.vertices().iter().zip(nu.vertex_atoms()) {
        if m > 1e-9 {
            let (x, y) = frame.map(xy(v.coords()));
            let r = 2.0 + 10.0 * m.sqrt();
            let _ = writeln!(out, r#"<circle cx="{x:.3}" cy="{y:.3}" r="{r:.3}"/>"#);
        }
    }
    let _ = writeln!(out, "</g>");
    out.push_str("</svg>\n");
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::EmbeddedGraph;
    use crate::measure::Point;

    #[test]
    fn renders_segment() {
        let g = EmbeddedGraph::segment(Point(vec![0.0, 0.0]), Point(vec![1.0, 1.0])).unwrap();
        let rho = DiscreteMeasure::uniform(vec![Point(vec![0.0, 1.0]), Point(vec![1.0, 0.0])]).unwrap();
        let svg = render_svg(Some(&rho), &CurveMeasure::uniform(g)).unwrap();
        assert!(svg.starts_with("<svg"));
        assert_eq!(svg.matches("<line").count(), 1);
        assert_eq!(svg.matches("<circle").count(), 2);
    }

    #[test]
    fn dirac_draws_atom() {
        let svg = render_svg(None, &CurveMeasure::dirac(Point(vec![2.0, 3.0]))).unwrap();
        assert_eq!(svg.matches("<circle").count(), 1);
        assert!(render_svg(None, &CurveMeasure::dirac(Point(vec![2.0]))).is_err());
    }
}
