use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A direction on the measurement sphere.
///
/// Angles are held in degrees so that container round trips are exact; the
/// accessors return radians. Azimuth is measured counter-clockwise from the
/// front (+x) towards the left ear (+y), elevation upwards from the
/// horizontal plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SphericalDirection {
    azimuth_deg: f64,
    elevation_deg: f64,
    radius: f64,
}

impl SphericalDirection {
    /// Builds a direction from radians. Azimuth wraps into `[0, 2π)`,
    /// elevation is clamped to `[-π/2, π/2]`.
    pub fn new(azimuth: f64, elevation: f64, radius: f64) -> Result<Self> {
        Self::from_degrees(azimuth.to_degrees(), elevation.to_degrees(), radius)
    }

    pub fn from_degrees(azimuth_deg: f64, elevation_deg: f64, radius: f64) -> Result<Self> {
        if !(azimuth_deg.is_finite() && elevation_deg.is_finite() && radius.is_finite()) {
            return Err(Error::NonFinite("spherical direction".into()));
        }
        if radius <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "radius must be strictly positive, got {radius}"
            )));
        }
        let mut azimuth_deg = azimuth_deg.rem_euclid(360.0);
        // rem_euclid can round up to exactly 360 for tiny negative inputs
        if azimuth_deg >= 360.0 {
            azimuth_deg = 0.0;
        }
        Ok(SphericalDirection {
            azimuth_deg,
            elevation_deg: elevation_deg.clamp(-90.0, 90.0),
            radius,
        })
    }

    /// Direction of a (not necessarily normalized) cartesian vector.
    pub fn from_cartesian(v: [f64; 3], radius: f64) -> Result<Self> {
        let norm = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::InvalidArgument("zero-length direction vector".into()));
        }
        let z = (v[2] / norm).clamp(-1.0, 1.0);
        Self::new(v[1].atan2(v[0]), z.asin(), radius)
    }

    pub fn azimuth(&self) -> f64 {
        self.azimuth_deg.to_radians()
    }

    pub fn elevation(&self) -> f64 {
        self.elevation_deg.to_radians()
    }

    pub fn azimuth_deg(&self) -> f64 {
        self.azimuth_deg
    }

    pub fn elevation_deg(&self) -> f64 {
        self.elevation_deg
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// Unit vector `[x, y, z]` with x to the front, y to the left, z up.
    pub fn unit_vector(&self) -> [f64; 3] {
        let (az, el) = (self.azimuth(), self.elevation());
        [el.cos() * az.cos(), el.cos() * az.sin(), el.sin()]
    }

    /// Great-circle angle to `other`, in radians.
    pub fn angle_to(&self, other: &SphericalDirection) -> f64 {
        angle_between(self.unit_vector(), other.unit_vector())
    }

    /// Lateral angle in `[-π/2, π/2]`, positive towards the left ear.
    pub fn lateral_angle(&self) -> f64 {
        self.unit_vector()[1].clamp(-1.0, 1.0).asin()
    }
}

pub(crate) fn angle_between(a: [f64; 3], b: [f64; 3]) -> f64 {
    // atan2 of cross and dot stays accurate for nearly parallel vectors
    let cross = [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ];
    let cross_norm = (cross[0] * cross[0] + cross[1] * cross[1] + cross[2] * cross[2]).sqrt();
    let dot = a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
    cross_norm.atan2(dot)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn azimuth_wraps_and_elevation_clamps() {
        let d = SphericalDirection::new(-PI / 2.0, 2.0, 1.0).unwrap();
        assert!((d.azimuth() - 1.5 * PI).abs() < 1e-12);
        assert_eq!(d.elevation_deg(), 90.0);
        let d = SphericalDirection::from_degrees(725.0, -100.0, 1.2).unwrap();
        assert!((d.azimuth_deg() - 5.0).abs() < 1e-12);
        assert_eq!(d.elevation_deg(), -90.0);
    }

    #[test]
    fn radius_must_be_positive() {
        assert!(SphericalDirection::new(0.0, 0.0, 0.0).is_err());
        assert!(SphericalDirection::new(0.0, 0.0, -1.0).is_err());
        assert!(SphericalDirection::new(f64::NAN, 0.0, 1.0).is_err());
    }

    #[test]
    fn cartesian_round_trip() {
        let d = SphericalDirection::from_degrees(123.0, -31.0, 1.5).unwrap();
        let back = SphericalDirection::from_cartesian(d.unit_vector(), 1.5).unwrap();
        assert!(d.angle_to(&back) < 1e-12);
    }

    #[test]
    fn left_is_positive_lateral() {
        let left = SphericalDirection::from_degrees(90.0, 0.0, 1.0).unwrap();
        assert!((left.lateral_angle() - PI / 2.0).abs() < 1e-12);
        let front = SphericalDirection::from_degrees(0.0, 0.0, 1.0).unwrap();
        assert!(front.lateral_angle().abs() < 1e-12);
    }
}
