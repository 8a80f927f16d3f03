//! Points, user layouts and antenna placements.

use crate::error::{Error, Result};

/// A point in the 3-D service volume (m).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3 {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Point3 { x, y, z }
    }

    /// A user point on the ground plane (z = 0).
    pub fn ground(x: f64, y: f64) -> Self {
        Point3 { x, y, z: 0.0 }
    }

    /// Euclidean distance to another point.
    pub fn distance(&self, other: &Point3) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        let dz = self.z - other.z;
        (dx * dx + dy * dy + dz * dz).sqrt()
    }
}

/// Positions of the K users in the service rectangle. All users lie in the
/// ground plane, z = 0 exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct UserLayout {
    positions: Vec<Point3>,
}

impl UserLayout {
    /// Build a layout, enforcing z = 0 for every user.
    pub fn new(positions: Vec<Point3>) -> Result<Self> {
        if positions.is_empty() {
            return Err(Error::InvalidConfig("layout must contain at least one user".into()));
        }
        if let Some(p) = positions.iter().find(|p| p.z != 0.0) {
            return Err(Error::InvalidConfig(format!(
                "user z-coordinate must be exactly 0, got {}",
                p.z
            )));
        }
        Ok(UserLayout { positions })
    }

    /// Build a layout from ground-plane coordinates.
    pub fn on_ground(xy: &[(f64, f64)]) -> Result<Self> {
        Self::new(xy.iter().map(|&(x, y)| Point3::ground(x, y)).collect())
    }

    pub fn positions(&self) -> &[Point3] {
        &self.positions
    }

    pub fn users(&self) -> usize {
        self.positions.len()
    }

    /// Span of the user x-coordinates, `(x_min, x_max)`.
    pub fn x_span(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for p in &self.positions {
            lo = lo.min(p.x);
            hi = hi.max(p.x);
        }
        (lo, hi)
    }
}

/// x-coordinates of the M pinching antennas along the waveguide, all at a
/// common height above the user plane.
///
/// Construction does not enforce guard spacing; placements produced by the
/// placement module satisfy the guard and bound constraints exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct AntennaPlacement {
    xs: Vec<f64>,
    height_m: f64,
}

impl AntennaPlacement {
    pub fn new(xs: Vec<f64>, height_m: f64) -> Result<Self> {
        if xs.is_empty() {
            return Err(Error::InvalidConfig("placement must contain at least one antenna".into()));
        }
        if xs.iter().any(|x| !x.is_finite()) || !height_m.is_finite() {
            return Err(Error::InvalidConfig("antenna coordinates must be finite".into()));
        }
        Ok(AntennaPlacement { xs, height_m })
    }

    pub fn xs(&self) -> &[f64] {
        &self.xs
    }

    pub fn height_m(&self) -> f64 {
        self.height_m
    }

    pub fn antennas(&self) -> usize {
        self.xs.len()
    }

    /// Position of antenna `m` as a 3-D point `(a_m, 0, d)`.
    pub fn position(&self, m: usize) -> Point3 {
        Point3::new(self.xs[m], 0.0, self.height_m)
    }

    /// Minimum spacing between consecutive antennas (infinite for M = 1).
    pub fn min_spacing(&self) -> f64 {
        self.xs
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::INFINITY, f64::min)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_rejects_off_plane_users() {
        let bad = UserLayout::new(vec![Point3::new(0.0, 0.0, 0.1)]);
        assert!(bad.is_err());
        let good = UserLayout::on_ground(&[(1.0, -2.0)]).unwrap();
        assert_eq!(good.positions()[0].z, 0.0);
    }

    #[test]
    fn x_span_covers_all_users() {
        let layout = UserLayout::on_ground(&[(-2.0, 0.0), (4.0, 1.0), (0.5, -1.0)]).unwrap();
        assert_eq!(layout.x_span(), (-2.0, 4.0));
    }

    #[test]
    fn distance_is_euclidean() {
        let a = Point3::new(1.0, 2.0, 0.0);
        let b = Point3::new(3.0, 0.0, 3.0);
        assert!((a.distance(&b) - 17f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn placement_accessors() {
        let p = AntennaPlacement::new(vec![-1.0, 0.5, 2.0], 3.0).unwrap();
        assert_eq!(p.antennas(), 3);
        assert_eq!(p.position(1), Point3::new(0.5, 0.0, 3.0));
        assert!((p.min_spacing() - 1.5).abs() < 1e-15);
    }
}
