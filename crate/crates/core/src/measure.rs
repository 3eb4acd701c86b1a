//! Multi-band measures dμ = ρ/(π√|h|) dx on E plus real point masses off the hull.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::numerics::{BranchedRoot, SegmentRule};

/// Guard distance for evaluation near the support.
pub const GUARD: f64 = 1e-8;
pub const DEFAULT_NODES: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Band {
    pub lower: f64,
    pub upper: f64,
}

impl From<[f64; 2]> for Band {
    fn from(v: [f64; 2]) -> Self {
        Self {
            lower: v[0],
            upper: v[1],
        }
    }
}

impl From<Band> for [f64; 2] {
    fn from(b: Band) -> Self {
        [b.lower, b.upper]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointMass {
    pub location: f64,
    pub weight: f64,
}

/// Analytic weight ρ on E.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Weight {
    #[serde(rename = "const")]
    Constant(f64),
    /// Σ c_k x^k
    Polynomial(Vec<f64>),
    /// exp(Σ c_k x^k)
    ExpPolynomial(Vec<f64>),
    /// (Σ num_k x^k)/(Σ den_k x^k)
    Rational { num: Vec<f64>, den: Vec<f64> },
}

fn poly(c: &[f64], x: f64) -> f64 {
    crate::numerics::horner(c, x)
}

impl Weight {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Weight::Constant(c) => *c,
            Weight::Polynomial(c) => poly(c, x),
            Weight::ExpPolynomial(c) => poly(c, x).exp(),
            Weight::Rational { num, den } => poly(num, x) / poly(den, x),
        }
    }

    pub fn log(&self, x: f64) -> f64 {
        match self {
            Weight::ExpPolynomial(c) => poly(c, x),
            _ => self.eval(x).ln(),
        }
    }

    fn degree(&self) -> usize {
        match self {
            Weight::Constant(_) => 0,
            Weight::Polynomial(c) | Weight::ExpPolynomial(c) => c.len().saturating_sub(1),
            Weight::Rational { num, den } => num.len().max(den.len()).saturating_sub(1),
        }
    }

    /// The weight multiplied by s > 0.
    pub fn scaled(&self, s: f64) -> Weight {
        match self {
            Weight::Constant(c) => Weight::Constant(c * s),
            Weight::Polynomial(c) => Weight::Polynomial(c.iter().map(|v| v * s).collect()),
            Weight::ExpPolynomial(c) => {
                let mut c = c.clone();
                if c.is_empty() {
                    c.push(0.0);
                }
                c[0] += s.ln();
                Weight::ExpPolynomial(c)
            }
            Weight::Rational { num, den } => Weight::Rational {
                num: num.iter().map(|v| v * s).collect(),
                den: den.clone(),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiBandMeasure {
    pub bands: Vec<Band>,
    pub weight: Weight,
    #[serde(default)]
    pub masses: Vec<PointMass>,
    #[serde(default)]
    pub normalized: bool,
}

impl MultiBandMeasure {
    pub fn new(bands: Vec<Band>, weight: Weight, masses: Vec<PointMass>) -> Self {
        Self {
            bands,
            weight,
            masses,
            normalized: false,
        }
    }

    /// Single interval with constant weight and no masses.
    pub fn interval(lower: f64, upper: f64) -> Self {
        Self::new(vec![Band { lower, upper }], Weight::Constant(1.0), vec![])
    }

    pub fn from_edges(e: &[f64], weight: Weight, masses: Vec<PointMass>) -> Self {
        let bands = e
            .chunks(2)
            .map(|p| Band {
                lower: p[0],
                upper: p[1],
            })
            .collect();
        Self::new(bands, weight, masses)
    }

    pub fn validate(&self) -> Result<ValidatedMeasure> {
        ValidatedMeasure::new(self.clone(), DEFAULT_NODES)
    }
}

/// A measure that passed validation, with its branch data and quadrature tables.
#[derive(Debug, Clone)]
pub struct ValidatedMeasure {
    measure: MultiBandMeasure,
    root: BranchedRoot,
    rules: Vec<SegmentRule>,
}

impl ValidatedMeasure {
    pub fn new(measure: MultiBandMeasure, nodes: usize) -> Result<Self> {
        let bands = &measure.bands;
        if bands.is_empty() {
            return Err(Error::NoBands);
        }
        for b in bands {
            if !(b.lower < b.upper) {
                return Err(Error::EmptyBand {
                    lower: b.lower,
                    upper: b.upper,
                });
            }
        }
        for p in bands.windows(2) {
            if !(p[0].upper < p[1].lower) {
                return Err(Error::OverlappingBands { at: p[1].lower });
            }
        }
        let e: Vec<f64> = bands.iter().flat_map(|b| [b.lower, b.upper]).collect();
        let (lo, hi) = (e[0], e[e.len() - 1]);
        for m in &measure.masses {
            if !(m.weight > 0.0) {
                return Err(Error::NonpositiveMass {
                    location: m.location,
                    weight: m.weight,
                });
            }
            if m.location >= lo && m.location <= hi {
                return Err(Error::MassInsideHull {
                    location: m.location,
                    lo,
                    hi,
                });
            }
        }
        let samples = 64 * (measure.weight.degree() + 1);
        for b in bands {
            let (c, r) = (0.5 * (b.lower + b.upper), 0.5 * (b.upper - b.lower));
            let edge = [b.lower, b.upper];
            let interior =
                (0..samples).map(|k| c + r * (PI * (k as f64 + 0.5) / samples as f64).cos());
            for x in edge.into_iter().chain(interior) {
                let v = measure.weight.eval(x);
                if !(v > 0.0 && v.is_finite()) {
                    return Err(Error::NonpositiveWeight { at: x, value: v });
                }
                if let Weight::Rational { den, .. } = &measure.weight {
                    if poly(den, x).abs() < GUARD {
                        return Err(Error::NonpositiveWeight { at: x, value: v });
                    }
                }
            }
        }
        let root = BranchedRoot::new(e);
        let rules = (0..bands.len())
            .map(|j| root.band_quadrature(j, nodes))
            .collect();
        Ok(Self {
            measure,
            root,
            rules,
        })
    }

    pub fn measure(&self) -> &MultiBandMeasure {
        &self.measure
    }

    pub fn root(&self) -> &BranchedRoot {
        &self.root
    }

    pub fn genus(&self) -> usize {
        self.root.genus()
    }

    pub fn hull(&self) -> (f64, f64) {
        (self.root.left(), self.root.right())
    }

    pub fn masses(&self) -> &[PointMass] {
        &self.measure.masses
    }

    pub fn weight(&self) -> &Weight {
        &self.measure.weight
    }

    pub fn nodes_per_band(&self) -> usize {
        self.rules[0].nodes.len()
    }

    /// Discrete nodes and weights: band quadrature followed by the point masses.
    pub fn discretize(&self) -> (Vec<f64>, Vec<f64>) {
        let rho = &self.measure.weight;
        let band = self.rules.iter().flat_map(|r| {
            r.nodes
                .iter()
                .zip(&r.weights)
                .map(move |(&x, &w)| (x, w * rho.eval(x) / PI))
        });
        let point = self.measure.masses.iter().map(|m| (m.location, m.weight));
        band.chain(point).unzip()
    }

    /// Σ_bands (1/π)∫ f ρ/√|h| + Σ λ_k f(ζ_k).
    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        let rho = &self.measure.weight;
        let bands: f64 = self
            .rules
            .iter()
            .map(|r| r.integrate(|x| f(x) * rho.eval(x)))
            .sum::<f64>()
            / PI;
        bands
            + self
                .measure
                .masses
                .iter()
                .map(|m| m.weight * f(m.location))
                .sum::<f64>()
    }

    pub fn integrate_complex<F: Fn(f64) -> Complex64>(&self, f: F) -> Complex64 {
        let re = self.integrate(|x| f(x).re);
        let im = self.integrate(|x| f(x).im);
        Complex64::new(re, im)
    }

    pub fn total_mass(&self) -> f64 {
        self.integrate(|_| 1.0)
    }

    pub fn normalize(&self) -> ValidatedMeasure {
        let s = 1.0 / self.total_mass();
        let mut m = self.measure.clone();
        m.weight = m.weight.scaled(s);
        for p in &mut m.masses {
            p.weight *= s;
        }
        m.normalized = true;
        Self {
            measure: m,
            root: self.root.clone(),
            rules: self.rules.clone(),
        }
    }

    pub fn distance_to_support(&self, z: Complex64) -> f64 {
        let e = self.root.e();
        let band = e
            .chunks(2)
            .map(|p| {
                let x = z.re.clamp(p[0], p[1]);
                ((z.re - x).powi(2) + z.im * z.im).sqrt()
            })
            .fold(f64::INFINITY, f64::min);
        self.measure
            .masses
            .iter()
            .map(|m| (z - m.location).norm())
            .fold(band, f64::min)
    }

    pub fn check_guard(&self, z: Complex64) -> Result<()> {
        if self.distance_to_support(z) <= GUARD {
            Err(Error::EvaluationTooCloseToSupport { re: z.re, im: z.im })
        } else {
            Ok(())
        }
    }

    /// μ̂(z) = ∫ dμ(t)/(z − t).
    pub fn cauchy_transform(&self, z: Complex64) -> Result<Complex64> {
        self.check_guard(z)?;
        Ok(self.integrate_complex(|x| 1.0 / (z - x)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn arcsine() -> ValidatedMeasure {
        MultiBandMeasure::interval(-1.0, 1.0).validate().unwrap()
    }

    #[test]
    fn validation_errors() {
        let m = MultiBandMeasure::from_edges(&[-1.0, 0.1, 0.0, 1.0], Weight::Constant(1.0), vec![]);
        assert!(matches!(m.validate(), Err(Error::OverlappingBands { .. })));
        let mut m = MultiBandMeasure::interval(-1.0, 1.0);
        m.masses.push(PointMass {
            location: 0.5,
            weight: 0.1,
        });
        assert!(matches!(m.validate(), Err(Error::MassInsideHull { .. })));
        m.masses[0] = PointMass {
            location: 2.0,
            weight: 0.0,
        };
        assert!(matches!(m.validate(), Err(Error::NonpositiveMass { .. })));
        let m = MultiBandMeasure::new(
            vec![Band {
                lower: -1.0,
                upper: 1.0,
            }],
            Weight::Polynomial(vec![0.0, 1.0]),
            vec![],
        );
        assert!(matches!(m.validate(), Err(Error::NonpositiveWeight { .. })));
        assert_eq!(arcsine().genus(), 0);
    }

    #[test]
    fn arcsine_mass_and_moments() {
        let m = arcsine();
        assert_abs_diff_eq!(m.total_mass(), 1.0, epsilon = 1e-13);
        assert_abs_diff_eq!(m.integrate(|x| x * x), 0.5, epsilon = 1e-13);
        let mut with_mass = m.measure().clone();
        with_mass.masses.push(PointMass {
            location: 2.0,
            weight: 0.5,
        });
        let v = with_mass.validate().unwrap();
        assert_abs_diff_eq!(v.total_mass(), 1.5, epsilon = 1e-13);
        let n = v.normalize();
        assert_abs_diff_eq!(n.total_mass(), 1.0, epsilon = 1e-13);
        assert_abs_diff_eq!(n.masses()[0].weight, 1.0 / 3.0, epsilon = 1e-13);
        let nn = n.normalize();
        assert_abs_diff_eq!(nn.masses()[0].weight, n.masses()[0].weight, epsilon = 1e-15);
    }

    #[test]
    fn scaled_weights_normalize_alike() {
        for w in [
            Weight::Constant(2.0),
            Weight::Polynomial(vec![2.0, 0.5]),
            Weight::ExpPolynomial(vec![0.3, 1.0]),
            Weight::Rational {
                num: vec![3.0],
                den: vec![2.0, 0.5],
            },
        ] {
            let m = MultiBandMeasure::new(
                vec![Band {
                    lower: -1.0,
                    upper: 1.0,
                }],
                w.clone(),
                vec![],
            );
            let v = m.validate().unwrap().normalize();
            assert_abs_diff_eq!(v.total_mass(), 1.0, epsilon = 1e-12);
            let ratio = v.weight().eval(0.3) / w.eval(0.3);
            assert_abs_diff_eq!(v.weight().eval(-0.7) / w.eval(-0.7), ratio, epsilon = 1e-12);
        }
    }

    #[test]
    fn cauchy_transform_arcsine() {
        let m = arcsine();
        let v = m.cauchy_transform(Complex64::new(2.0, 0.0)).unwrap();
        assert_abs_diff_eq!(v.re, 1.0 / 3f64.sqrt(), epsilon = 1e-13);
        let big = m.cauchy_transform(Complex64::new(1e6, 0.0)).unwrap();
        assert_abs_diff_eq!(big.re * 1e6, 1.0, epsilon = 1e-5);
        let z = Complex64::new(1.3, 0.7);
        let a = m.cauchy_transform(z).unwrap();
        let b = m.cauchy_transform(z.conj()).unwrap();
        assert_abs_diff_eq!((a.conj() - b).norm(), 0.0, epsilon = 1e-14);
        assert!(a.im < 0.0);
        assert!(m.cauchy_transform(Complex64::new(0.2, 1e-9)).is_err());
    }

    #[test]
    fn weight_json_forms() {
        let w: Weight = serde_json::from_str(r#"{"const": 1.0}"#).unwrap();
        assert_eq!(w, Weight::Constant(1.0));
        let w: Weight =
            serde_json::from_str(r#"{"rational": {"num": [1.0], "den": [2.0, 0.1]}}"#).unwrap();
        assert!(matches!(w, Weight::Rational { .. }));
    }
}
