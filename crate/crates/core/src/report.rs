//! Artifact emission: canonical-form JSON, boundary CSV/JSON, SVG polygons and the
//! combined reach-set report.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::boundary::BoundarySample;
use crate::error::Result;
use crate::format::sig12;
use crate::lti_model::{CanonicalForm, NumericalSettings};
use crate::sim::ContainmentReport;
use crate::volume::VolumeResult;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EigenvalueReport {
    pub re: f64,
    pub im: f64,
    pub modulus: f64,
    pub argument: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CanonicalReport {
    #[serde(rename = "M")]
    pub m: Vec<Vec<f64>>,
    #[serde(rename = "M_inv")]
    pub m_inv: Vec<Vec<f64>>,
    pub c: Vec<f64>,
    pub eigenvalues: Vec<EigenvalueReport>,
    #[serde(rename = "det_M")]
    pub det_m: f64,
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

impl From<&CanonicalForm> for CanonicalReport {
    fn from(cf: &CanonicalForm) -> Self {
        Self {
            m: rows(&cf.m),
            m_inv: rows(&cf.m_inv),
            c: cf.c.iter().copied().collect(),
            eigenvalues: cf
                .eigs
                .iter()
                .map(|z| EigenvalueReport { re: z.re, im: z.im, modulus: z.norm(), argument: z.arg() })
                .collect(),
            det_m: cf.det_m,
        }
    }
}

/// One boundary point in both coordinate systems.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundaryPoint {
    pub t: f64,
    pub side: &'static str,
    pub sigma: Vec<f64>,
    pub x: Vec<f64>,
    pub z: Vec<f64>,
}

/// Flatten samples into upper and lower points (`z` falls back to `x` if unmapped).
pub fn boundary_points(t: f64, samples: &[BoundarySample]) -> Vec<BoundaryPoint> {
    let vecs = |v: &DVector<f64>| v.iter().copied().collect::<Vec<_>>();
    let mut out = Vec::with_capacity(2 * samples.len());
    for s in samples {
        for (side, x, z) in [("upper", &s.x_upper, &s.z_upper), ("lower", &s.x_lower, &s.z_lower)] {
            out.push(BoundaryPoint {
                t,
                side,
                sigma: s.sigma.as_slice().to_vec(),
                x: vecs(x),
                z: vecs(z.as_ref().unwrap_or(x)),
            });
        }
    }
    out
}

/// CSV header `t,side,sigma_1..sigma_{n-1},x_1..x_n,z_1..z_n`.
pub fn boundary_csv_header(n: usize) -> String {
    let mut h = String::from("t,side");
    for k in 1..n {
        write!(h, ",sigma_{k}").unwrap();
    }
    for p in ["x", "z"] {
        for k in 1..=n {
            write!(h, ",{p}_{k}").unwrap();
        }
    }
    h.push('\n');
    h
}

pub fn boundary_csv_rows(points: &[BoundaryPoint], out: &mut String) {
    for p in points {
        out.push_str(&sig12(p.t));
        out.push(',');
        out.push_str(p.side);
        for v in p.sigma.iter().chain(&p.x).chain(&p.z) {
            out.push(',');
            out.push_str(&sig12(*v));
        }
        out.push('\n');
    }
}

pub fn boundary_csv(n: usize, points: &[BoundaryPoint]) -> String {
    let mut out = boundary_csv_header(n);
    boundary_csv_rows(points, &mut out);
    out
}

/// Everything computed for one configuration, with the settings that produced it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReachSetReport {
    pub n: usize,
    pub t: f64,
    pub settings: NumericalSettings,
    pub canonical: CanonicalReport,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub boundary: Vec<BoundaryPoint>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub volume: Option<VolumeResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub containment: Option<ContainmentReport>,
}

impl ReachSetReport {
    pub fn to_json(&self) -> String {
        to_json(self)
    }
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report serializes");
    s.push('\n');
    s
}

/// A single closed `<path>` for a planar polygon, y pointing up, viewBox padded by 5%.
pub fn svg_polygon(polygon: &[[f64; 2]]) -> String {
    svg_polygons(&[polygon])
}

/// Several closed paths sharing one fitted viewBox.
pub fn svg_polygons(polygons: &[&[[f64; 2]]]) -> String {
    let pts = polygons.iter().flat_map(|p| p.iter());
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for p in pts {
        for k in 0..2 {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    if !lo[0].is_finite() {
        lo = [0.0; 2];
        hi = [0.0; 2];
    }
    let span = (hi[0] - lo[0]).max(hi[1] - lo[1]);
    let span = if span > 0.0 { span } else { 1.0 };
    let pad = |w: f64| 0.05 * if w > 0.0 { w } else { span };
    let (px, py) = (pad(hi[0] - lo[0]), pad(hi[1] - lo[1]));
    let (x0, y0) = (lo[0] - px, -hi[1] - py);
    let (w, h) = (hi[0] - lo[0] + 2.0 * px, hi[1] - lo[1] + 2.0 * py);
    let mut out = String::new();
    writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="{x0:.6} {y0:.6} {w:.6} {h:.6}">"#
    )
    .unwrap();
    for poly in polygons {
        let pts = match poly.split_last() {
            Some((last, rest)) if Some(last) == poly.first() && !rest.is_empty() => rest,
            _ => poly,
        };
        let mut d = String::new();
        for (i, p) in pts.iter().enumerate() {
            let y = -p[1] + 0.0;
            write!(d, "{}{:.6} {:.6} ", if i == 0 { "M" } else { "L" }, p[0] + 0.0, y).unwrap();
        }
        d.push('Z');
        writeln!(
            out,
            r#"  <path d="{d}" fill="none" stroke="black" stroke-width="1" vector-effect="non-scaling-stroke"/>"#
        )
        .unwrap();
    }
    out.push_str("</svg>\n");
    out
}

pub fn emit_svg_polygon(polygon: &[[f64; 2]], path: &Path) -> Result<()> {
    std::fs::write(path, svg_polygon(polygon))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boundary::WeylPoint;

    #[test]
    fn unit_square_svg() {
        let svg = svg_polygon(&[[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0], [0.0, 0.0]]);
        assert!(svg.contains(r#"viewBox="-0.050000 -1.050000 1.100000 1.100000""#), "{svg}");
        assert!(svg.contains(r#"d="M0.000000 0.000000 L1.000000 0.000000 L1.000000 -1.000000 L0.000000 -1.000000 Z""#), "{svg}");
        assert_eq!(svg.matches("<path").count(), 1);
    }

    #[test]
    fn degenerate_svg_is_still_valid() {
        let svg = svg_polygon(&[[0.5, -0.5]; 4]);
        assert!(svg.starts_with("<svg") && svg.ends_with("</svg>\n"));
        assert!(svg.contains(r#"viewBox="0.450000 0.450000 0.100000 0.100000""#), "{svg}");
        assert!(svg.contains(r#"d="M0.500000 0.500000 L0.500000 0.500000 L0.500000 0.500000 Z""#), "{svg}");
    }

    #[test]
    fn csv_layout() {
        let s = BoundarySample {
            sigma: WeylPoint::new(vec![0.25], 1.0).unwrap(),
            x_upper: DVector::from_vec(vec![1.0, 2.0]),
            x_lower: DVector::from_vec(vec![-1.0, -2.0]),
            z_upper: None,
            z_lower: None,
            eta: DVector::zeros(2),
        };
        let csv = boundary_csv(2, &boundary_points(1.0, &[s]));
        assert_eq!(csv, "t,side,sigma_1,x_1,x_2,z_1,z_2\n1,upper,0.25,1,2,1,2\n1,lower,0.25,-1,-2,-1,-2\n");
    }
}
