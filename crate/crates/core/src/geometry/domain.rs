use serde::{Deserialize, Serialize};

use super::curve::Curve;
use crate::error::{Error, Result};

/// Axis-aligned rectangle, used for the degenerate-set neighborhood O and for
/// bump supports.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Rect {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl Rect {
    pub fn contains(&self, p: [f64; 2]) -> bool {
        p[0] >= self.x0 && p[0] <= self.x1 && p[1] >= self.y0 && p[1] <= self.y1
    }

    pub fn intersects(&self, other: &Rect) -> bool {
        self.x0 < other.x1 && other.x0 < self.x1 && self.y0 < other.y1 && other.y0 < self.y1
    }
}

/// Textual domain description, as read from a config file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum DomainSpec {
    Rectangle {
        x0: f64,
        x1: f64,
        y0: f64,
        y1: f64,
        s: u32,
        /// Half-width of the default strip O = {|x| < margin}; only used when
        /// the closed rectangle meets {x = 0}. Defaults to 10% of the x-extent.
        #[serde(default)]
        o_margin: Option<f64>,
    },
    Disk {
        center: [f64; 2],
        radius: f64,
        s: u32,
        #[serde(default)]
        o_margin: Option<f64>,
    },
    CurveLoop {
        curves: Vec<Curve>,
        s: u32,
        #[serde(default)]
        o_rect: Option<Rect>,
    },
}

#[derive(Debug, Clone)]
pub enum DomainKind {
    Rectangle { x0: f64, x1: f64, y0: f64, y1: f64 },
    Disk { center: [f64; 2], radius: f64 },
    Generic,
}

/// A 2D domain with a parametric boundary, the weight exponent `s`, and the
/// neighborhood O of the degenerate set {x = 0} when the closure meets it.
#[derive(Debug, Clone)]
pub struct Domain {
    pub segments: Vec<Curve>,
    pub s: u32,
    pub o_spec: Option<Rect>,
    pub touches_degenerate: bool,
    pub kind: DomainKind,
    /// boundary samples, kept for the generic point-membership test
    boundary_polygon: Vec<[f64; 2]>,
}

impl Domain {
    pub fn inside(&self, p: [f64; 2]) -> bool {
        match self.kind {
            DomainKind::Rectangle { x0, x1, y0, y1 } => {
                p[0] > x0 && p[0] < x1 && p[1] > y0 && p[1] < y1
            }
            DomainKind::Disk { center, radius } => {
                let dx = p[0] - center[0];
                let dy = p[1] - center[1];
                dx * dx + dy * dy < radius * radius
            }
            DomainKind::Generic => winding_number(&self.boundary_polygon, p) != 0,
        }
    }

    pub fn bounding_box(&self) -> Rect {
        let mut r = Rect { x0: f64::INFINITY, x1: f64::NEG_INFINITY, y0: f64::INFINITY, y1: f64::NEG_INFINITY };
        for p in &self.boundary_polygon {
            r.x0 = r.x0.min(p[0]);
            r.x1 = r.x1.max(p[0]);
            r.y0 = r.y0.min(p[1]);
            r.y1 = r.y1.max(p[1]);
        }
        r
    }
}

fn winding_number(poly: &[[f64; 2]], p: [f64; 2]) -> i32 {
    let mut wn = 0i32;
    for i in 0..poly.len() {
        let a = poly[i];
        let b = poly[(i + 1) % poly.len()];
        if a[1] <= p[1] {
            if b[1] > p[1] && cross(a, b, p) > 0.0 {
                wn += 1;
            }
        } else if b[1] <= p[1] && cross(a, b, p) < 0.0 {
            wn -= 1;
        }
    }
    wn
}

fn cross(a: [f64; 2], b: [f64; 2], p: [f64; 2]) -> f64 {
    (b[0] - a[0]) * (p[1] - a[1]) - (p[0] - a[0]) * (b[1] - a[1])
}

const LOOP_SAMPLES_PER_SEGMENT: usize = 64;

/// Build and validate a [`Domain`] from its textual description.
pub fn build_domain(spec: &DomainSpec) -> Result<Domain> {
    let (segments, s, o_margin, o_rect, kind) = match spec {
        DomainSpec::Rectangle { x0, x1, y0, y1, s, o_margin } => {
            if !(x0 < x1 && y0 < y1) {
                return Err(Error::MalformedSpec(format!(
                    "rectangle needs x0 < x1 and y0 < y1, got [{x0},{x1}]x[{y0},{y1}]"
                )));
            }
            let segs = vec![
                Curve::Line { start: [*x0, *y0], end: [*x1, *y0] },
                Curve::Line { start: [*x1, *y0], end: [*x1, *y1] },
                Curve::Line { start: [*x1, *y1], end: [*x0, *y1] },
                Curve::Line { start: [*x0, *y1], end: [*x0, *y0] },
            ];
            (segs, *s, *o_margin, None, DomainKind::Rectangle { x0: *x0, x1: *x1, y0: *y0, y1: *y1 })
        }
        DomainSpec::Disk { center, radius, s, o_margin } => {
            if *radius <= 0.0 {
                return Err(Error::MalformedSpec(format!("disk radius must be positive, got {radius}")));
            }
            let segs = vec![Curve::Arc {
                center: *center,
                radius: *radius,
                angle0: 0.0,
                angle1: std::f64::consts::TAU,
            }];
            (segs, *s, *o_margin, None, DomainKind::Disk { center: *center, radius: *radius })
        }
        DomainSpec::CurveLoop { curves, s, o_rect } => {
            if curves.is_empty() {
                return Err(Error::MalformedSpec("curve loop with no segments".into()));
            }
            (curves.clone(), *s, None, *o_rect, DomainKind::Generic)
        }
    };

    // loop closure
    for (i, seg) in segments.iter().enumerate() {
        let next = &segments[(i + 1) % segments.len()];
        let e = seg.point(1.0);
        let b = next.point(0.0);
        if (e[0] - b[0]).hypot(e[1] - b[1]) > 1e-10 {
            return Err(Error::BadBoundary(format!(
                "segment {i} ends at ({}, {}) but segment {} starts at ({}, {})",
                e[0], e[1], (i + 1) % segments.len(), b[0], b[1]
            )));
        }
    }

    // sampled polygon for orientation / intersection / membership checks
    let mut poly: Vec<[f64; 2]> = Vec::new();
    for seg in &segments {
        for j in 0..LOOP_SAMPLES_PER_SEGMENT {
            poly.push(seg.point(j as f64 / LOOP_SAMPLES_PER_SEGMENT as f64));
        }
    }
    let area2: f64 = (0..poly.len())
        .map(|i| {
            let a = poly[i];
            let b = poly[(i + 1) % poly.len()];
            a[0] * b[1] - b[0] * a[1]
        })
        .sum();
    if area2 <= 0.0 {
        return Err(Error::BadBoundary("boundary loop is not positively oriented".into()));
    }
    check_simple(&poly)?;
    let centroid = [
        poly.iter().map(|p| p[0]).sum::<f64>() / poly.len() as f64,
        poly.iter().map(|p| p[1]).sum::<f64>() / poly.len() as f64,
    ];
    if winding_number(&poly, centroid) != 1 {
        return Err(Error::BadBoundary("sampled winding number of the centroid is not 1".into()));
    }

    let xmin = poly.iter().map(|p| p[0]).fold(f64::INFINITY, f64::min);
    let xmax = poly.iter().map(|p| p[0]).fold(f64::NEG_INFINITY, f64::max);
    let ymin = poly.iter().map(|p| p[1]).fold(f64::INFINITY, f64::min);
    let ymax = poly.iter().map(|p| p[1]).fold(f64::NEG_INFINITY, f64::max);
    let touches = xmin <= 0.0 && xmax >= 0.0;

    let o_spec = if touches {
        match (o_rect, o_margin) {
            (Some(r), _) => {
                // supplied O must contain the part of {x = 0} inside the closure
                if !(r.x0 < 0.0 && r.x1 > 0.0) {
                    return Err(Error::MissingDegenerateNeighborhood);
                }
                for p in &poly {
                    if p[0].abs() < 1e-9 && !r.contains(*p) {
                        return Err(Error::MissingDegenerateNeighborhood);
                    }
                }
                Some(r)
            }
            (None, margin) => {
                // rectangles and disks get a default strip; a generic loop must
                // bring its own O
                let m = match (margin, &kind) {
                    (Some(m), _) => m,
                    (None, DomainKind::Generic) => {
                        return Err(Error::MissingDegenerateNeighborhood)
                    }
                    (None, _) => 0.1 * (xmax - xmin),
                };
                if m <= 0.0 {
                    return Err(Error::MissingDegenerateNeighborhood);
                }
                Some(Rect { x0: -m, x1: m, y0: ymin - 1.0, y1: ymax + 1.0 })
            }
        }
    } else {
        None
    };

    Ok(Domain { segments, s, o_spec, touches_degenerate: touches, kind, boundary_polygon: poly })
}

fn check_simple(poly: &[[f64; 2]]) -> Result<()> {
    let n = poly.len();
    for i in 0..n {
        let (a1, a2) = (poly[i], poly[(i + 1) % n]);
        for j in (i + 2)..n {
            if i == 0 && j == n - 1 {
                continue; // adjacent through the wrap
            }
            let (b1, b2) = (poly[j], poly[(j + 1) % n]);
            if segments_intersect(a1, a2, b1, b2) {
                return Err(Error::BadBoundary(format!(
                    "sampled boundary pieces {i} and {j} intersect"
                )));
            }
        }
    }
    Ok(())
}

fn segments_intersect(a1: [f64; 2], a2: [f64; 2], b1: [f64; 2], b2: [f64; 2]) -> bool {
    let d1 = cross(b1, b2, a1);
    let d2 = cross(b1, b2, a2);
    let d3 = cross(a1, a2, b1);
    let d4 = cross(a1, a2, b2);
    ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rectangle_away_from_degenerate_set_needs_no_o() {
        let d = build_domain(&DomainSpec::Rectangle {
            x0: 0.2, x1: 1.2, y0: 0.0, y1: 1.0, s: 1, o_margin: None,
        })
        .unwrap();
        assert!(d.o_spec.is_none());
        assert!(!d.touches_degenerate);
        assert!(d.inside([0.7, 0.5]));
        assert!(!d.inside([0.1, 0.5]));
    }

    #[test]
    fn rectangle_crossing_degenerate_set_gets_default_strip() {
        let d = build_domain(&DomainSpec::Rectangle {
            x0: -1.0, x1: 1.0, y0: 0.0, y1: 1.0, s: 1, o_margin: Some(0.25),
        })
        .unwrap();
        let o = d.o_spec.unwrap();
        assert!(d.touches_degenerate);
        assert_eq!(o.x0, -0.25);
        assert_eq!(o.x1, 0.25);
    }

    #[test]
    fn disk_is_valid_and_winding_check_passes() {
        let d = build_domain(&DomainSpec::Disk { center: [2.0, 0.0], radius: 1.0, s: 2, o_margin: None })
            .unwrap();
        assert!(d.o_spec.is_none());
        assert!(d.inside([2.0, 0.5]));
        assert!(!d.inside([0.5, 0.5]));
    }

    #[test]
    fn clockwise_loop_is_rejected() {
        let curves = vec![
            Curve::Line { start: [0.0, 0.0], end: [0.0, 1.0] },
            Curve::Line { start: [0.0, 1.0], end: [1.0, 1.0] },
            Curve::Line { start: [1.0, 1.0], end: [1.0, 0.0] },
            Curve::Line { start: [1.0, 0.0], end: [0.0, 0.0] },
        ];
        let e = build_domain(&DomainSpec::CurveLoop { curves, s: 0, o_rect: None });
        assert!(matches!(e, Err(Error::BadBoundary(_))));
    }

    #[test]
    fn self_intersecting_loop_is_rejected() {
        let curves = vec![
            Curve::Line { start: [0.0, 0.0], end: [1.0, 1.0] },
            Curve::Line { start: [1.0, 1.0], end: [1.0, 0.0] },
            Curve::Line { start: [1.0, 0.0], end: [0.0, 1.0] },
            Curve::Line { start: [0.0, 1.0], end: [0.0, 0.0] },
        ];
        let e = build_domain(&DomainSpec::CurveLoop { curves, s: 0, o_rect: None });
        assert!(e.is_err());
    }

    #[test]
    fn degenerate_touching_loop_without_o_is_rejected() {
        // unit square with its left side on {x = 0}, no O given
        let curves = vec![
            Curve::Line { start: [0.0, 0.0], end: [1.0, 0.0] },
            Curve::Line { start: [1.0, 0.0], end: [1.0, 1.0] },
            Curve::Line { start: [1.0, 1.0], end: [0.0, 1.0] },
            Curve::Line { start: [0.0, 1.0], end: [0.0, 0.0] },
        ];
        let e = build_domain(&DomainSpec::CurveLoop { curves, s: 1, o_rect: None });
        assert!(matches!(e, Err(Error::MissingDegenerateNeighborhood)));
    }
}
