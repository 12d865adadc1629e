//! Exact barycentric coordinates for vertices of `Chr^m s`.
//!
//! A `Chr s` vertex `(i, t)` sits at `x_i/(2k-1) + 2/(2k-1) * sum_{j in t, j != i} x_j`
//! with `k = |t|`. Deeper levels apply the same map inside the simplex
//! spanned by the previous level's vertices, which is what the nested
//! labels record.

use crate::complex::Vertex;
use crate::procset::{ProcSet, ProcessId};
use num_rational::Ratio;
use serde::Serialize;
use thiserror::Error;

pub type Rational = Ratio<i64>;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GeometryError {
    #[error("process {0} is not in its own view {1}")]
    NotInFace(ProcessId, ProcSet),
    #[error("malformed vertex label {0:?}")]
    BadLabel(String),
    #[error("color {0} outside 1..={1}")]
    ColorOutOfRange(ProcessId, usize),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BarycentricPoint {
    coords: Vec<Rational>,
}

impl BarycentricPoint {
    pub fn corner(i: ProcessId, n: usize) -> Self {
        let mut coords = vec![Rational::from_integer(0); n];
        coords[i.index()] = Rational::from_integer(1);
        Self { coords }
    }

    pub fn coords(&self) -> &[Rational] {
        &self.coords
    }

    pub fn is_valid(&self) -> bool {
        let zero = Rational::from_integer(0);
        self.coords.iter().all(|c| *c >= zero)
            && self.coords.iter().copied().sum::<Rational>() == Rational::from_integer(1)
    }

    fn combine(parts: &[(Rational, &BarycentricPoint)], n: usize) -> Self {
        let mut coords = vec![Rational::from_integer(0); n];
        for (w, p) in parts {
            for (c, x) in coords.iter_mut().zip(&p.coords) {
                *c += *w * *x;
            }
        }
        Self { coords }
    }
}

impl Serialize for BarycentricPoint {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let v: Vec<String> = self.coords.iter().map(|c| c.to_string()).collect();
        v.serialize(s)
    }
}

/// Placement of the subdivision vertex `(i, t)` for `i in t`, given the points of
/// the members of `t`.
fn place(i: ProcessId, members: &[(ProcessId, BarycentricPoint)], n: usize) -> BarycentricPoint {
    let k = members.len() as i64;
    let denom = 2 * k - 1;
    let parts: Vec<(Rational, &BarycentricPoint)> = members
        .iter()
        .map(|(j, p)| {
            let w = if *j == i {
                Rational::new(1, denom)
            } else {
                Rational::new(2, denom)
            };
            (w, p)
        })
        .collect();
    BarycentricPoint::combine(&parts, n)
}

/// Point of the `Chr s` vertex `(i, t)`.
pub fn chr1_point(i: ProcessId, t: ProcSet, n: usize) -> Result<BarycentricPoint, GeometryError> {
    if !t.contains(i) {
        return Err(GeometryError::NotInFace(i, t));
    }
    if i.get() > n {
        return Err(GeometryError::ColorOutOfRange(i, n));
    }
    let members: Vec<(ProcessId, BarycentricPoint)> = t
        .iter()
        .map(|j| (j, BarycentricPoint::corner(j, n)))
        .collect();
    Ok(place(i, &members, n))
}

/// Point of any `Chr^m s` vertex, computed from its nested label.
pub fn geometric_point(v: &Vertex, n: usize) -> Result<BarycentricPoint, GeometryError> {
    if v.color.get() > n {
        return Err(GeometryError::ColorOutOfRange(v.color, n));
    }
    let bytes = v.label.as_bytes();
    let mut pos = 0;
    let p = point_of(v.color, bytes, &mut pos, n)
        .map_err(|_| GeometryError::BadLabel(v.label.to_string()))?;
    if pos != bytes.len() {
        return Err(GeometryError::BadLabel(v.label.to_string()));
    }
    p
}

// Parses the label of `i` starting at `pos` and returns its point. The outer
// Result is for syntax errors, the inner one for semantic ones.
#[allow(clippy::type_complexity)]
fn point_of(
    i: ProcessId,
    s: &[u8],
    pos: &mut usize,
    n: usize,
) -> Result<Result<BarycentricPoint, GeometryError>, ()> {
    if *pos >= s.len() || s[*pos] != b'{' {
        return Ok(Ok(BarycentricPoint::corner(i, n)));
    }
    *pos += 1;
    let mut members: Vec<(ProcessId, BarycentricPoint)> = Vec::new();
    loop {
        let start = *pos;
        while *pos < s.len() && s[*pos].is_ascii_digit() {
            *pos += 1;
        }
        if start == *pos {
            return Err(());
        }
        let id: usize = std::str::from_utf8(&s[start..*pos])
            .map_err(|_| ())?
            .parse()
            .map_err(|_| ())?;
        let j = ProcessId::new(id).ok_or(())?;
        if j.get() > n {
            return Ok(Err(GeometryError::ColorOutOfRange(j, n)));
        }
        let inner = point_of(j, s, pos, n)?;
        match inner {
            Ok(p) => members.push((j, p)),
            Err(e) => return Ok(Err(e)),
        }
        match s.get(*pos) {
            Some(b',') => *pos += 1,
            Some(b'}') => {
                *pos += 1;
                break;
            }
            _ => return Err(()),
        }
    }
    let t: ProcSet = members.iter().map(|(j, _)| *j).collect();
    if !t.contains(i) {
        return Ok(Err(GeometryError::NotInFace(i, t)));
    }
    Ok(Ok(place(i, &members, n)))
}

/// Signed area of a triangle relative to `|s|` for `n = 3`.
pub fn relative_area(a: &BarycentricPoint, b: &BarycentricPoint, c: &BarycentricPoint) -> Rational {
    let m = [a.coords(), b.coords(), c.coords()];
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

/// Planar position for `n = 3`: corner 1 on top, 2 bottom-left, 3 bottom-right.
pub fn planar(p: &BarycentricPoint) -> (f64, f64) {
    let h = 3f64.sqrt() / 2.0;
    let corners = [(0.5, 0.0), (0.0, h), (1.0, h)];
    let mut x = 0.0;
    let mut y = 0.0;
    for (c, (cx, cy)) in p.coords().iter().zip(corners) {
        let w = *c.numer() as f64 / *c.denom() as f64;
        x += w * cx;
        y += w * cy;
    }
    (x, y)
}
