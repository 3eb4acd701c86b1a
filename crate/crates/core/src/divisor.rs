//! Points of the two-sheeted surface and one-point-per-gap divisors.

use serde::Serialize;
use std::f64::consts::PI;

use crate::numerics::BranchedRoot;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Sheet {
    First,
    Second,
}

impl Sheet {
    pub fn sign(self) -> f64 {
        match self {
            Sheet::First => 1.0,
            Sheet::Second => -1.0,
        }
    }

    pub fn from_sign(s: f64) -> Self {
        if s >= 0.0 {
            Sheet::First
        } else {
            Sheet::Second
        }
    }

    pub fn flip(self) -> Self {
        match self {
            Sheet::First => Sheet::Second,
            Sheet::Second => Sheet::First,
        }
    }
}

/// A point (z, ±) with real projection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SurfacePoint {
    pub z: f64,
    pub sheet: Sheet,
}

impl SurfacePoint {
    pub fn new(z: f64, sheet: Sheet) -> Self {
        Self { z, sheet }
    }

    pub fn first(z: f64) -> Self {
        Self {
            z,
            sheet: Sheet::First,
        }
    }

    pub fn second(z: f64) -> Self {
        Self {
            z,
            sheet: Sheet::Second,
        }
    }
}

/// A divisor point on the cycle over gap `gap`, parametrized by x = c − r cos θ, sheet = sign(sin θ).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DivisorPoint {
    pub gap: usize,
    pub z: f64,
    pub sheet: Sheet,
    pub angle: f64,
}

/// Wraps an angle into (−π, π].
pub fn wrap_angle(t: f64) -> f64 {
    let w = (t + PI).rem_euclid(2.0 * PI) - PI;
    if w <= -PI {
        w + 2.0 * PI
    } else {
        w
    }
}

impl DivisorPoint {
    pub fn from_angle(root: &BranchedRoot, gap: usize, angle: f64) -> Self {
        let angle = wrap_angle(angle);
        let z = root.segment_point(2 * gap + 1, angle);
        let s = angle.sin();
        let sheet = if s.abs() < 1e-15 || s > 0.0 {
            Sheet::First
        } else {
            Sheet::Second
        };
        Self {
            gap,
            z,
            sheet,
            angle,
        }
    }

    pub fn from_point(root: &BranchedRoot, gap: usize, z: f64, sheet: Sheet) -> Self {
        let t = root.segment_angle(2 * gap + 1, z);
        let angle = if sheet == Sheet::Second { -t } else { t };
        Self::from_angle(root, gap, angle)
    }

    pub fn at_edge(&self) -> bool {
        self.angle.sin().abs() < 1e-12
    }
}

/// One point per gap, ordered by gap index.
#[derive(Debug, Clone, PartialEq, Serialize, Default)]
pub struct Divisor {
    pub points: Vec<DivisorPoint>,
}

impl Divisor {
    pub fn from_angles(root: &BranchedRoot, angles: &[f64]) -> Self {
        Self {
            points: angles
                .iter()
                .enumerate()
                .map(|(j, &a)| DivisorPoint::from_angle(root, j, a))
                .collect(),
        }
    }

    pub fn angles(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.angle).collect()
    }

    pub fn projections(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.z).collect()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// X(z) = ∏ (z − z_j).
    pub fn x_poly(&self, z: num_complex::Complex64) -> num_complex::Complex64 {
        self.points.iter().map(|p| z - p.z).product()
    }
}
