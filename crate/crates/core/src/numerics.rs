//! Branch of w = √h and quadrature rules with inverse square-root endpoint behaviour.

use num_complex::Complex64;
use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Gauss–Legendre rule on [-1, 1].
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=n {
                    let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                    p0 = p1;
                    p1 = p2;
                }
                let p = if n == 0 { 1.0 } else { p1 };
                dp = n as f64 * (x * p - p0) / (x * x - 1.0);
                let dx = p / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        Self { nodes, weights }
    }

    /// ∫_a^b f.
    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        let (c, r) = (0.5 * (a + b), 0.5 * (b - a));
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| w * f(c + r * x))
            .sum::<f64>()
            * r
    }

    /// ∫_a^b f on panels of width 1, 1, 2, 4, … measured from a.
    pub fn integrate_graded<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        let mut total = 0.0;
        let (mut lo, mut width) = (a, 1.0);
        while lo < b {
            let hi = (lo + width).min(b);
            total += self.integrate(lo, hi, &mut f);
            lo = hi;
            if lo - a >= 1.0 {
                width *= 2.0;
            }
        }
        total
    }

    /// (node, weight) pairs mapped to [a, b].
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let (c, r) = (0.5 * (a + b), 0.5 * (b - a));
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(x, w)| (c + r * x, w * r))
    }
}

/// Branch points e_1 < … < e_{2g+2} of h(z) = ∏(z − e_j).
#[derive(Debug, Clone, PartialEq)]
pub struct BranchedRoot {
    e: Vec<f64>,
}

/// Which side of the real axis a boundary value is taken from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Upper,
    Lower,
}

impl BranchedRoot {
    pub fn new(e: Vec<f64>) -> Self {
        debug_assert!(e.len().is_multiple_of(2) && e.windows(2).all(|p| p[0] < p[1]));
        Self { e }
    }

    pub fn e(&self) -> &[f64] {
        &self.e
    }

    pub fn genus(&self) -> usize {
        self.e.len() / 2 - 1
    }

    pub fn right(&self) -> f64 {
        *self.e.last().expect("nonempty branch list")
    }

    pub fn left(&self) -> f64 {
        self.e[0]
    }

    /// Sign of w on gap j and of w(x+i0)/i on band j (0-based, bands 0..=g, gaps 0..g).
    pub fn sigma(&self, j: usize) -> f64 {
        if (self.genus() - j).is_multiple_of(2) {
            1.0
        } else {
            -1.0
        }
    }

    pub fn h(&self, z: Complex64) -> Complex64 {
        self.e.iter().map(|&e| z - e).product()
    }

    /// ∏ |x − e_i| over i ∉ {i0, i0 + 1}.
    pub fn rest(&self, x: f64, i0: usize) -> f64 {
        self.e
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != i0 && *i != i0 + 1)
            .map(|(_, &e)| (x - e).abs())
            .product()
    }

    /// Band index containing x, if any.
    pub fn band_of(&self, x: f64) -> Option<usize> {
        (0..=self.genus()).find(|&j| x >= self.e[2 * j] && x <= self.e[2 * j + 1])
    }

    /// w on the first sheet of the cut plane.
    pub fn eval_w(&self, z: Complex64) -> Result<Complex64> {
        if z.im == 0.0 && self.e.contains(&z.re) {
            return Err(Error::BranchPointEvaluation(z.re));
        }
        if z.im == 0.0 {
            return Ok(self.boundary(z.re, Side::Upper));
        }
        Ok(self.e.iter().map(|&e| (z - e).sqrt()).product())
    }

    /// w(x ± i0); on gaps and outside the hull this is the real first-sheet value.
    pub fn boundary(&self, x: f64, side: Side) -> Complex64 {
        let s = match side {
            Side::Upper => 1.0,
            Side::Lower => -1.0,
        };
        self.e
            .iter()
            .map(|&e| {
                let d = x - e;
                if d >= 0.0 {
                    Complex64::new(d.sqrt(), 0.0)
                } else {
                    Complex64::new(0.0, s * (-d).sqrt())
                }
            })
            .product()
    }

    /// Real first-sheet w at a real point off the open bands.
    pub fn w_real(&self, x: f64) -> f64 {
        self.boundary(x, Side::Upper).re
    }

    /// Gauss–Chebyshev rule for ∫ f/√|h| over the segment [e_{i0}, e_{i0+1}].
    pub fn segment_rule(&self, i0: usize, count: usize) -> SegmentRule {
        let (lo, hi) = (self.e[i0], self.e[i0 + 1]);
        let (c, r) = (0.5 * (lo + hi), 0.5 * (hi - lo));
        let (nodes, weights) = (1..=count)
            .map(|k| {
                let phi = (2 * k - 1) as f64 * PI / (2 * count) as f64;
                let x = c - r * phi.cos();
                (x, PI / count as f64 / self.rest(x, i0).sqrt())
            })
            .unzip();
        SegmentRule { i0, nodes, weights }
    }

    pub fn band_quadrature(&self, band: usize, count: usize) -> SegmentRule {
        self.segment_rule(2 * band, count)
    }

    pub fn gap_quadrature(&self, gap: usize, count: usize) -> SegmentRule {
        self.segment_rule(2 * gap + 1, count)
    }

    /// Angle coordinate x = c − r cos φ on the segment starting at e_{i0}.
    pub fn segment_point(&self, i0: usize, phi: f64) -> f64 {
        let (lo, hi) = (self.e[i0], self.e[i0 + 1]);
        0.5 * (lo + hi) - 0.5 * (hi - lo) * phi.cos()
    }

    pub fn segment_angle(&self, i0: usize, x: f64) -> f64 {
        let (lo, hi) = (self.e[i0], self.e[i0 + 1]);
        ((0.5 * (lo + hi) - x) / (0.5 * (hi - lo)))
            .clamp(-1.0, 1.0)
            .acos()
    }

    /// ∫ f/√|h| from e_{i0} to x(φ) along the segment; φ may be negative.
    pub fn partial_segment<F: Fn(f64) -> f64>(
        &self,
        i0: usize,
        phi: f64,
        f: F,
        gl: &GaussLegendre,
    ) -> f64 {
        gl.integrate(0.0, phi, |t| {
            let x = self.segment_point(i0, t);
            f(x) / self.rest(x, i0).sqrt()
        })
    }

    /// ∫_{e_{2g+2}}^{z} f/w along the real ray, z > e_{2g+2}.
    /// w(e_{2g+2} + u²) without cancellation in the last factor.
    pub fn w_right(&self, u: f64) -> f64 {
        let t = self.right() + u * u;
        let n = self.e.len();
        u * self.e[..n - 1]
            .iter()
            .map(|&ej| (t - ej).sqrt())
            .product::<f64>()
    }

    /// w(e_1 − u²) without cancellation in the first factor.
    pub fn w_left(&self, u: f64) -> f64 {
        let t = self.left() - u * u;
        let sign = if self.genus().is_multiple_of(2) {
            -1.0
        } else {
            1.0
        };
        sign * u
            * self.e[1..]
                .iter()
                .map(|&ej| (ej - t).sqrt())
                .product::<f64>()
    }

    /// ∫_{e_{2g+2}}^{z} f/w along the real axis.
    pub fn ray_integral<F: Fn(f64) -> f64>(&self, z: f64, f: F, gl: &GaussLegendre) -> f64 {
        let e = self.right();
        let l = (z - e).sqrt();
        gl.integrate_graded(0.0, l, |u| 2.0 * u * f(e + u * u) / self.w_right(u))
    }

    /// ∫_{z}^{e_1} f/w along the real axis, z < e_1.
    pub fn left_ray_integral<F: Fn(f64) -> f64>(&self, z: f64, f: F, gl: &GaussLegendre) -> f64 {
        let e = self.left();
        let l = (e - z).sqrt();
        gl.integrate_graded(0.0, l, |u| 2.0 * u * f(e - u * u) / self.w_left(u))
    }

    /// Finite part ∫_{e_{2g+2}}^{∞} (g(t, w(t)) − c/(t − e_{2g+2} + 1)) dt.
    pub fn ray_tail<F: Fn(f64, f64) -> f64>(&self, g: F, c: f64, gl: &GaussLegendre) -> f64 {
        let e = self.right();
        let near = gl.integrate(0.0, 1.0, |u| {
            let t = e + u * u;
            (g(t, self.w_right(u)) - c / (u * u + 1.0)) * 2.0 * u
        });
        let far = gl.integrate(0.0, 1.0, |s| {
            let t = e + 1.0 / (s * s);
            (g(t, self.w_right(1.0 / s)) - c * s * s / (1.0 + s * s)) * 2.0 / (s * s * s)
        });
        near + far
    }
}

/// Nodes and weights for ∫ f(x)/√|h(x)| dx over one band or gap.
#[derive(Debug, Clone)]
pub struct SegmentRule {
    pub i0: usize,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl SegmentRule {
    pub fn integrate<F: FnMut(f64) -> f64>(&self, mut f: F) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }
}

/// Coefficients c_0..c_d evaluated at x by Horner's rule.
pub fn horner(c: &[f64], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &ci| acc * x + ci)
}

pub fn horner_c(c: &[f64], z: Complex64) -> Complex64 {
    c.iter()
        .rev()
        .fold(Complex64::new(0.0, 0.0), |acc, &ci| acc * z + ci)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn legendre_integrates_polynomials() {
        let gl = GaussLegendre::new(12);
        assert_abs_diff_eq!(
            gl.integrate(0.0, 2.0, |x| x.powi(5)),
            64.0 / 6.0,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(gl.weights.iter().sum::<f64>(), 2.0, epsilon = 1e-14);
    }

    #[test]
    fn w_on_single_band() {
        let r = BranchedRoot::new(vec![-1.0, 1.0]);
        let w = r.eval_w(Complex64::new(2.0, 0.0)).unwrap();
        assert_abs_diff_eq!(w.re, 3f64.sqrt(), epsilon = 1e-14);
        let up = r.boundary(0.3, Side::Upper);
        let dn = r.boundary(0.3, Side::Lower);
        assert_abs_diff_eq!((up + dn).norm(), 0.0, epsilon = 1e-13);
        assert_abs_diff_eq!(up.im, (1.0f64 - 0.09).sqrt(), epsilon = 1e-14);
        assert!(r.eval_w(Complex64::new(1.0, 0.0)).is_err());
    }

    #[test]
    fn boundary_matches_limit_from_above() {
        let r = BranchedRoot::new(vec![-2.0, -1.2, -0.9, 0.1, 0.5, 1.3]);
        for &x in &[-1.5, -0.3, 0.9, -1.0, 0.3, 2.0, -3.0] {
            let lim = r.eval_w(Complex64::new(x, 1e-12)).unwrap();
            assert_abs_diff_eq!(
                (lim - r.boundary(x, Side::Upper)).norm(),
                0.0,
                epsilon = 1e-6
            );
            let lim = r.eval_w(Complex64::new(x, -1e-12)).unwrap();
            assert_abs_diff_eq!(
                (lim - r.boundary(x, Side::Lower)).norm(),
                0.0,
                epsilon = 1e-6
            );
        }
        assert!(r.boundary(0.9, Side::Upper).im > 0.0);
        assert_eq!(r.w_real(0.3).signum(), r.sigma(1));
        assert_eq!(r.w_real(-1.0).signum(), r.sigma(0));
    }

    #[test]
    fn chebyshev_moments() {
        let r = BranchedRoot::new(vec![-1.0, 1.0]);
        let q = r.band_quadrature(0, 8);
        assert_abs_diff_eq!(q.integrate(|_| 1.0), PI, epsilon = 1e-14);
        assert_abs_diff_eq!(q.integrate(|x| x * x), PI / 2.0, epsilon = 1e-14);
    }

    #[test]
    fn partial_segment_reaches_full_integral() {
        let r = BranchedRoot::new(vec![-1.0, -0.4, 0.0, 1.0]);
        let gl = GaussLegendre::new(60);
        let full = r.gap_quadrature(0, 200).integrate(|x| 1.0 + x);
        let part = r.partial_segment(1, PI, |x| 1.0 + x, &gl);
        assert_abs_diff_eq!(full, part, epsilon = 1e-12);
    }

    #[test]
    fn ray_tail_of_single_band() {
        let r = BranchedRoot::new(vec![-1.0, 1.0]);
        let gl = GaussLegendre::new(200);
        // ∫_1^∞ (1/√(t²−1) − 1/t) dt = log 2
        let fp = r.ray_tail(|_, w| 1.0 / w, 1.0, &gl);
        assert_abs_diff_eq!(fp, 2f64.ln(), epsilon = 1e-10);
    }
}
