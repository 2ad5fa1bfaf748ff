use crate::error::{invalid, Result};
use crate::room::Orientation;

pub type Vec3 = [f64; 3];

/// A direction on the unit sphere in degrees, azimuth counterclockwise from
/// the local +x (forward) axis, elevation toward +z.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Direction {
    pub azimuth_deg: f64,
    pub elevation_deg: f64,
}

impl Direction {
    pub fn new(azimuth_deg: f64, elevation_deg: f64) -> Self {
        Self {
            azimuth_deg,
            elevation_deg,
        }
    }

    pub fn from_vector(v: Vec3) -> Option<Self> {
        let n = norm(v);
        if n == 0.0 || !n.is_finite() {
            return None;
        }
        let az = v[1].atan2(v[0]).to_degrees();
        let el = (v[2] / n).clamp(-1.0, 1.0).asin().to_degrees();
        Some(Self::new(az, el))
    }

    pub fn unit_vector(&self) -> Vec3 {
        let (az, el) = (self.azimuth_deg.to_radians(), self.elevation_deg.to_radians());
        [el.cos() * az.cos(), el.cos() * az.sin(), el.sin()]
    }

    /// Great-circle separation in degrees.
    pub fn angle_to(&self, other: &Direction) -> f64 {
        let (a, b) = (self.unit_vector(), other.unit_vector());
        // atan2 form stays accurate for tiny and near-antipodal angles.
        let c = cross(a, b);
        norm(c).atan2(dot(a, b)).to_degrees()
    }
}

pub fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub fn cross(a: Vec3, b: Vec3) -> Vec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

pub fn norm(a: Vec3) -> f64 {
    dot(a, a).sqrt()
}

pub fn sub(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub fn distance(a: Vec3, b: Vec3) -> f64 {
    norm(sub(a, b))
}

/// Orthonormal basis (forward, left, up) of an oriented entity.
pub fn basis(o: &Orientation) -> [Vec3; 3] {
    let (az, el) = (o.azimuth_deg.to_radians(), o.elevation_deg.to_radians());
    let fwd = [el.cos() * az.cos(), el.cos() * az.sin(), el.sin()];
    let left = [-az.sin(), az.cos(), 0.0];
    let up = [-el.sin() * az.cos(), -el.sin() * az.sin(), el.cos()];
    [fwd, left, up]
}

pub fn world_to_local(o: &Orientation, v: Vec3) -> Vec3 {
    let [f, l, u] = basis(o);
    [dot(v, f), dot(v, l), dot(v, u)]
}

pub fn local_to_world(o: &Orientation, v: Vec3) -> Vec3 {
    let [f, l, u] = basis(o);
    [
        v[0] * f[0] + v[1] * l[0] + v[2] * u[0],
        v[0] * f[1] + v[1] * l[1] + v[2] * u[1],
        v[0] * f[2] + v[1] * l[2] + v[2] * u[2],
    ]
}

/// Direction of `to` as seen from an entity at `from` with orientation `o`.
pub fn direction_from_to(from: Vec3, o: &Orientation, to: Vec3) -> Result<Direction> {
    let v = sub(to, from);
    if norm(v) < 1e-12 {
        return invalid("direction between coincident positions is undefined");
    }
    Ok(Direction::from_vector(world_to_local(o, v)).expect("nonzero vector"))
}
