//! SVG rendering of two-dimensional complexes (`n = 3`).

use super::geometry::{geometric_point, planar, GeometryError};
use crate::complex::{ChromaticComplex, Simplex, Vertex};
use std::fmt::Write;

#[derive(Clone, Debug)]
pub struct SvgStyle {
    /// Side length of the outer triangle in user units.
    pub scale: f64,
    pub margin: f64,
    pub highlight_fill: &'static str,
    pub plain_fill: &'static str,
    pub vertex_radius: f64,
}

impl Default for SvgStyle {
    fn default() -> Self {
        Self {
            scale: 600.0,
            margin: 20.0,
            highlight_fill: "#8fb8ff",
            plain_fill: "#f4f4f4",
            vertex_radius: 4.0,
        }
    }
}

/// Fill color of a process: 1 red, 2 blue, 3 white.
pub fn process_color(color: usize) -> &'static str {
    match color {
        1 => "#d62728",
        2 => "#1f4fd6",
        3 => "#ffffff",
        _ => "#888888",
    }
}

/// Draws every facet of `c`, filling those accepted by `highlight`, and
/// marks vertices accepted by `emphasize` with a thicker outline.
pub fn render(
    c: &ChromaticComplex,
    style: &SvgStyle,
    highlight: &dyn Fn(&Simplex) -> bool,
    emphasize: &dyn Fn(&Vertex) -> bool,
) -> Result<String, GeometryError> {
    let n = c.n();
    let width = style.scale + 2.0 * style.margin;
    let height = style.scale * 3f64.sqrt() / 2.0 + 2.0 * style.margin;
    let at = |v: &Vertex| -> Result<(f64, f64), GeometryError> {
        let (x, y) = planar(&geometric_point(v, n)?);
        Ok((
            style.margin + x * style.scale,
            style.margin + y * style.scale,
        ))
    };
    let mut out = String::new();
    writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {width:.3} {height:.3}" width="{width:.0}" height="{height:.0}">"#
    )
    .unwrap();
    for f in c.facets() {
        let pts = f
            .vertices()
            .iter()
            .map(|v| at(v).map(|(x, y)| format!("{x:.3},{y:.3}")))
            .collect::<Result<Vec<_>, _>>()?;
        let fill = if highlight(f) {
            style.highlight_fill
        } else {
            style.plain_fill
        };
        writeln!(
            out,
            r##"  <polygon points="{}" fill="{fill}" stroke="#333333" stroke-width="0.6"/>"##,
            pts.join(" ")
        )
        .unwrap();
    }
    for v in c.vertices() {
        let (x, y) = at(&v)?;
        let stroke_width = if emphasize(&v) { 2.5 } else { 0.8 };
        writeln!(
            out,
            r##"  <circle cx="{x:.3}" cy="{y:.3}" r="{:.1}" fill="{}" stroke="#000000" stroke-width="{stroke_width}"/>"##,
            style.vertex_radius,
            process_color(v.color.get())
        )
        .unwrap();
    }
    out.push_str("</svg>\n");
    Ok(out)
}
