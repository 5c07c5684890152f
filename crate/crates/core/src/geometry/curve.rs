use serde::{Deserialize, Serialize};

/// A smooth parametric boundary curve, `t in [0, 1]`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum Curve {
    Line { start: [f64; 2], end: [f64; 2] },
    /// Circular arc from `angle0` to `angle1` (radians, counterclockwise when
    /// `angle1 > angle0`).
    Arc { center: [f64; 2], radius: f64, angle0: f64, angle1: f64 },
}

impl Curve {
    pub fn point(&self, t: f64) -> [f64; 2] {
        match *self {
            Curve::Line { start, end } => [
                start[0] + t * (end[0] - start[0]),
                start[1] + t * (end[1] - start[1]),
            ],
            Curve::Arc { center, radius, angle0, angle1 } => {
                let a = angle0 + t * (angle1 - angle0);
                [center[0] + radius * a.cos(), center[1] + radius * a.sin()]
            }
        }
    }

    /// First derivative with respect to `t`.
    pub fn velocity(&self, t: f64) -> [f64; 2] {
        match *self {
            Curve::Line { start, end } => [end[0] - start[0], end[1] - start[1]],
            Curve::Arc { center: _, radius, angle0, angle1 } => {
                let da = angle1 - angle0;
                let a = angle0 + t * da;
                [-radius * da * a.sin(), radius * da * a.cos()]
            }
        }
    }

    /// Second derivative with respect to `t`.
    pub fn acceleration(&self, t: f64) -> [f64; 2] {
        match *self {
            Curve::Line { .. } => [0.0, 0.0],
            Curve::Arc { center: _, radius, angle0, angle1 } => {
                let da = angle1 - angle0;
                let a = angle0 + t * da;
                [-radius * da * da * a.cos(), -radius * da * da * a.sin()]
            }
        }
    }

    /// Outward unit normal for a positively oriented loop (interior on the left
    /// of the tangent): the tangent rotated by -90 degrees.
    pub fn outward_normal(&self, t: f64) -> [f64; 2] {
        let v = self.velocity(t);
        let speed = (v[0] * v[0] + v[1] * v[1]).sqrt();
        [v[1] / speed, -v[0] / speed]
    }

    /// Signed curvature; positive on convex pieces of a positively oriented
    /// loop, and equal to div n for the outward normal field.
    pub fn curvature(&self, t: f64) -> f64 {
        let v = self.velocity(t);
        let a = self.acceleration(t);
        let speed = (v[0] * v[0] + v[1] * v[1]).sqrt();
        (v[0] * a[1] - v[1] * a[0]) / (speed * speed * speed)
    }

    /// Arclength of the whole curve (exact for lines and arcs).
    pub fn arclength(&self) -> f64 {
        match *self {
            Curve::Line { start, end } => {
                ((end[0] - start[0]).powi(2) + (end[1] - start[1]).powi(2)).sqrt()
            }
            Curve::Arc { radius, angle0, angle1, .. } => radius * (angle1 - angle0).abs(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn circle_normal_and_curvature() {
        let c = Curve::Arc { center: [2.0, 0.0], radius: 0.5, angle0: 0.0, angle1: std::f64::consts::TAU };
        for i in 0..17 {
            let t = i as f64 / 17.0;
            let p = c.point(t);
            let n = c.outward_normal(t);
            // outward normal of a circle is radial
            assert_relative_eq!(n[0], (p[0] - 2.0) / 0.5, epsilon = 1e-12);
            assert_relative_eq!(n[1], p[1] / 0.5, epsilon = 1e-12);
            assert_relative_eq!(c.curvature(t), 2.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn line_normal_is_axis_vector() {
        let bottom = Curve::Line { start: [0.0, 0.0], end: [1.0, 0.0] };
        assert_eq!(bottom.outward_normal(0.5), [0.0, -1.0]);
        assert_eq!(bottom.curvature(0.3), 0.0);
        assert_relative_eq!(bottom.arclength(), 1.0);
    }
}
