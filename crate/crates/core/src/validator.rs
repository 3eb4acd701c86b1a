//! Trace-formula predictions, the ψ-function on the ray, and residual tables with decay fits.

use nalgebra::DVector;
use num_complex::Complex64;
use serde::Serialize;
use std::f64::consts::PI;

use crate::divisor::{Divisor, Sheet, SurfacePoint};
use crate::error::{Error, Result};
use crate::inversion::{
    inversion_rhs, solve_inversion, InversionSolution, InversionTarget, Mode, NewtonSettings,
};
use crate::measure::{ValidatedMeasure, Weight};
use crate::recurrence::{
    diagonal_green, qn_on_nodes, spurious_poles, stieltjes_coefficients, RecurrenceCoefficients,
};
use crate::surface::{c_last, Pole, Surface, Szego, ThirdKind};

/// Residuals at or below this level are treated as round-off.
pub const NOISE_FLOOR: f64 = 1e-12;
pub const MIN_FIT_POINTS: usize = 8;

/// ½Σe_j − Σz_j for the divisor one degree below.
pub fn predict_b(surface: &Surface, previous: &Divisor) -> f64 {
    0.5 * surface.e().iter().sum::<f64>() - previous.projections().iter().sum::<f64>()
}

fn signed_green(surface: &Surface, d: &Divisor) -> f64 {
    d.points
        .iter()
        .map(|p| surface.surface_green(SurfacePoint::new(p.z, p.sheet)))
        .sum()
}

/// cap E · exp(½Σ g(𝐳_j(n)) − ½Σ g(𝐳_j(n−1))) with the signed continuation of g.
pub fn predict_a(surface: &Surface, current: &Divisor, previous: &Divisor) -> f64 {
    surface.capacity()
        * (0.5 * signed_green(surface, current) - 0.5 * signed_green(surface, previous)).exp()
}

/// Circle |z − c| = 2r around the hull, 64 points, minus points within 0.3 of a mass.
pub fn default_contour(measure: &ValidatedMeasure) -> Vec<Complex64> {
    let (lo, hi) = measure.hull();
    let (c, r) = (0.5 * (lo + hi), 0.5 * (hi - lo));
    (0..64)
        .map(|k| c + Complex64::from_polar(2.0 * r, 2.0 * PI * (k as f64 + 0.5) / 64.0))
        .filter(|z| {
            measure
                .masses()
                .iter()
                .all(|m| (z - m.location).norm() >= 0.3)
        })
        .collect()
}

/// sup over the contour of |q_n r_n − X_{g,n}/w|.
pub fn theorem1_residual(
    measure: &ValidatedMeasure,
    coeffs: &RecurrenceCoefficients,
    surface: &Surface,
    n: usize,
    divisor: &Divisor,
    contour: &[Complex64],
) -> Result<f64> {
    contour.iter().try_fold(0.0f64, |m, &z| {
        let g = diagonal_green(measure, coeffs, n, z)?;
        let w = surface.root().eval_w(z)?;
        Ok(m.max((g - divisor.x_poly(z) / w).norm()))
    })
}

/// Least-squares line through (n, log r).
#[derive(Debug, Clone, Serialize)]
pub struct DecayFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub points: usize,
}

impl DecayFit {
    pub fn decays(&self) -> bool {
        self.slope < -0.05 && self.r_squared > 0.9
    }
}

/// Fit over residuals above the noise floor; None with fewer than eight such points.
pub fn log_linear_fit(ns: &[usize], residuals: &[f64]) -> Option<DecayFit> {
    let pts: Vec<(f64, f64)> = ns
        .iter()
        .zip(residuals)
        .filter(|(_, &r)| r > NOISE_FLOOR)
        .map(|(&n, &r)| (n as f64, r.ln()))
        .collect();
    if pts.len() < MIN_FIT_POINTS {
        return None;
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = sxy / sxx;
    let r_squared = if syy == 0.0 {
        1.0
    } else {
        sxy * sxy / (sxx * syy)
    };
    Some(DecayFit {
        slope,
        intercept: my - slope * mx,
        r_squared,
        points: pts.len(),
    })
}

/// Verdict for a residual series: a decaying fit, or everything already at round-off.
#[derive(Debug, Clone, Serialize)]
pub struct DecayVerdict {
    pub fit: Option<DecayFit>,
    pub last: f64,
    pub pass: bool,
}

pub fn decay_verdict(ns: &[usize], residuals: &[f64]) -> DecayVerdict {
    let fit = log_linear_fit(ns, residuals);
    let last = residuals.last().copied().unwrap_or(0.0);
    let pass = match &fit {
        Some(f) => f.decays(),
        None => residuals.iter().filter(|&&r| r > NOISE_FLOOR).count() == 0 || last < 1e-10,
    };
    DecayVerdict { fit, last, pass }
}

/// Orthonormal coefficients, surface and solved divisors for n_min..=n_max of a normalized measure.
#[derive(Debug, Clone)]
pub struct Pipeline {
    pub measure: ValidatedMeasure,
    pub surface: Surface,
    pub coeffs: RecurrenceCoefficients,
    pub mode: Mode,
    pub n_min: usize,
    pub targets: Vec<InversionTarget>,
    pub solutions: Vec<InversionSolution>,
}

impl Pipeline {
    pub fn new(measure: &ValidatedMeasure, n_min: usize, n_max: usize, mode: Mode) -> Result<Self> {
        Self::with_settings(measure, n_min, n_max, mode, &NewtonSettings::default())
    }

    pub fn with_settings(
        measure: &ValidatedMeasure,
        n_min: usize,
        n_max: usize,
        mode: Mode,
        settings: &NewtonSettings,
    ) -> Result<Self> {
        let measure = measure.normalize();
        let surface = Surface::new(measure.root().e())?;
        let coeffs = stieltjes_coefficients(&measure, n_max + 2)?;
        let mut targets = Vec::new();
        let mut solutions: Vec<InversionSolution> = Vec::new();
        for n in n_min..=n_max {
            let spurious = match mode {
                Mode::Asymptotic => vec![],
                Mode::ExactN => spurious_zeros(&measure, &coeffs, n)?,
            };
            let t = inversion_rhs(&surface, &measure, n, mode, &spurious)?;
            let warm = solutions.last().map(|s| &s.divisor);
            let s = solve_inversion(&surface, &t, warm, settings)?;
            targets.push(t);
            solutions.push(s);
        }
        Ok(Self {
            measure,
            surface,
            coeffs,
            mode,
            n_min,
            targets,
            solutions,
        })
    }

    pub fn n_max(&self) -> usize {
        self.n_min + self.solutions.len() - 1
    }

    pub fn divisor(&self, n: usize) -> Option<&Divisor> {
        n.checked_sub(self.n_min)
            .and_then(|i| self.solutions.get(i))
            .map(|s| &s.divisor)
    }

    pub fn divisors(&self) -> Vec<Divisor> {
        self.solutions.iter().map(|s| s.divisor.clone()).collect()
    }
}

/// ζ_{s,n} for every mass, or MissingSpuriousPole when q_n has no zero beyond the hull.
pub fn spurious_zeros(
    measure: &ValidatedMeasure,
    coeffs: &RecurrenceCoefficients,
    n: usize,
) -> Result<Vec<f64>> {
    spurious_poles(measure, coeffs, n)
        .into_iter()
        .zip(measure.masses())
        .map(|(r, m)| {
            r.map(|p| p.zero).map_err(|_| Error::MissingSpuriousPole {
                location: m.location,
                n,
            })
        })
        .collect()
}

/// ψ(z^{(1,2)}; n) on the ray right of E, assembled from the divisor at degree n.
#[derive(Debug, Clone)]
pub struct Psi {
    pub n: usize,
    blocks: Vec<ThirdKind>,
    mass_blocks: Vec<(ThirdKind, f64)>,
    szego: Szego,
    c_half: f64,
    pub theta: Vec<f64>,
    pub log_kappa: f64,
}

impl Psi {
    /// `masses` pairs each mass location ζ_s with ζ_{s,n}; `weight` is the normalized weight.
    pub fn new(
        surface: &Surface,
        weight: &Weight,
        divisor: &Divisor,
        n: usize,
        masses: &[(f64, f64)],
    ) -> Result<Self> {
        let g = surface.genus();
        let e = surface.root().right();
        let blocks: Vec<ThirdKind> = divisor
            .points
            .iter()
            .map(|p| {
                surface.third_kind(
                    Pole::Point(SurfacePoint::new(p.z, p.sheet)),
                    Pole::Infinity(Sheet::First),
                )
            })
            .collect::<Result<_>>()?;
        let mass_blocks: Vec<(ThirdKind, f64)> = masses
            .iter()
            .map(|&(zeta, zn)| {
                let tk = surface.third_kind(
                    Pole::Point(SurfacePoint::first(zeta)),
                    Pole::Point(SurfacePoint::second(zn)),
                )?;
                Ok((tk, 0.5 * (e - zeta).abs().ln() - 0.5 * (e - zn).abs().ln()))
            })
            .collect::<Result<_>>()?;
        let szego = surface.szego(weight)?;
        let c_half = 0.5 * c_last(surface, divisor);

        let theta = if g == 0 {
            vec![]
        } else {
            let ro = DVector::from_fn(g, |m, _| {
                blocks
                    .iter()
                    .chain(mass_blocks.iter().map(|b| &b.0))
                    .map(|b| b.band_constant(surface, m))
                    .sum::<f64>()
                    - 0.5 * szego.v[m]
            });
            let lat = surface.lattice_coordinates(ro.as_slice());
            lat.iter().map(|v| -v / PI).collect()
        };

        let u_inf = surface.abel_infinity();
        let mut log_kappa = -((n as f64) - g as f64) * surface.log_capacity();
        log_kappa += blocks.iter().map(|b| b.asymptotics(surface).1).sum::<f64>();
        log_kappa += mass_blocks
            .iter()
            .map(|(b, c)| b.asymptotics(surface).1 + c)
            .sum::<f64>();
        log_kappa += szego.at_infinity() + c_half;
        log_kappa -= 2.0 * PI * theta.iter().zip(&u_inf).map(|(a, b)| a * b).sum::<f64>();
        Ok(Self {
            n,
            blocks,
            mass_blocks,
            szego,
            c_half,
            theta,
            log_kappa,
        })
    }

    /// (even, odd) with log|ψ(z^{(1)})| = even + odd and log|ψ(z^{(2)})| = even − odd.
    pub fn log_parts(&self, surface: &Surface, z: f64) -> Result<(f64, f64)> {
        if z <= surface.root().right() {
            return Err(Error::EvaluationOffSupportedRay(z));
        }
        let g = surface.genus();
        let mut even = self.c_half;
        let mut odd = (self.n as f64 - g as f64) * surface.green_real(z);
        for b in &self.blocks {
            let ev = b.even(surface, z);
            even += ev;
            odd += b.eval(surface, z)? - ev;
        }
        for (b, c) in &self.mass_blocks {
            let ev = b.even(surface, z);
            even += ev + c;
            odd += b.eval(surface, z)? - ev;
        }
        odd += self.szego.w_times_cauchy(surface, z);
        let u = surface.abel_outside(z);
        odd -= 2.0 * PI * self.theta.iter().zip(&u).map(|(a, b)| a * b).sum::<f64>();
        Ok((even, odd))
    }

    pub fn log_psi1(&self, surface: &Surface, z: f64) -> Result<f64> {
        self.log_parts(surface, z).map(|(e, o)| e + o)
    }

    pub fn log_psi2(&self, surface: &Surface, z: f64) -> Result<f64> {
        self.log_parts(surface, z).map(|(e, o)| e - o)
    }
}

fn mass_pairs(p: &Pipeline, n: usize) -> Result<Vec<(f64, f64)>> {
    let zs = match p.mode {
        Mode::ExactN => spurious_zeros(&p.measure, &p.coeffs, n)?,
        Mode::Asymptotic => spurious_zeros(&p.measure, &p.coeffs, n)
            .unwrap_or_else(|_| p.measure.masses().iter().map(|m| m.location).collect()),
    };
    Ok(p.measure
        .masses()
        .iter()
        .map(|m| m.location)
        .zip(zs)
        .collect())
}

pub fn psi_for(p: &Pipeline, n: usize) -> Result<Psi> {
    let d = p.divisor(n).ok_or(Error::DegreeOutOfRange {
        requested: n,
        available: p.n_max(),
    })?;
    Psi::new(&p.surface, p.measure.weight(), d, n, &mass_pairs(p, n)?)
}

/// |√2·q_n(z)/ψ₁(z) − 1| at a ray point.
pub fn verify_prop1(p: &Pipeline, n: usize, z: f64) -> Result<f64> {
    let psi = psi_for(p, n)?;
    let lp = psi.log_psi1(&p.surface, z)?;
    let q = p.coeffs.eval_qn_real(n, z).abs() * 2f64.sqrt();
    Ok((q.ln() - lp).exp_m1().abs())
}

/// |log(ψ₁ψ₂) − log|T_n X_{g,n}|| at a ray point.
pub fn psi_identity_error(p: &Pipeline, n: usize, z: f64) -> Result<f64> {
    let psi = psi_for(p, n)?;
    let d = p.divisor(n).ok_or(Error::DegreeOutOfRange {
        requested: n,
        available: p.n_max(),
    })?;
    let lhs = psi.log_psi1(&p.surface, z)? + psi.log_psi2(&p.surface, z)?;
    let x: f64 = d.projections().iter().map(|zj| (z - zj).ln()).sum();
    let t: f64 = mass_pairs(p, n)?
        .iter()
        .map(|&(zeta, zn)| ((z - zeta) / (z - zn)).abs().ln())
        .sum();
    Ok((lhs - x - t).abs())
}

#[derive(Debug, Clone, Serialize)]
pub struct NormalizationReport {
    pub n: usize,
    /// κ_n²/k_n², the integral of Q_n² against the normalized measure.
    pub value: f64,
    /// Σ λ_s Q_n(ζ_s)², taken as the complement of the band integral.
    pub mass_part: f64,
    /// ∫ q_n² dμ.
    pub orthonormal: f64,
}

pub fn normalization_check(p: &Pipeline, n: usize) -> Result<NormalizationReport> {
    let psi = psi_for(p, n)?;
    let ratio = (psi.log_kappa - p.coeffs.leading_coefficient(n).ln()).exp();
    let (xs, ws) = p.measure.discretize();
    let bands = xs.len() - p.measure.masses().len();
    let ac: f64 = xs[..bands]
        .iter()
        .zip(&ws[..bands])
        .map(|(&x, w)| w * p.coeffs.eval_qn_real(n, x).powi(2))
        .sum();
    let mass_part = ratio * ratio * (1.0 - ac);
    let (_, ws, q) = qn_on_nodes(&p.measure, &p.coeffs, n)?;
    let orthonormal = ws.iter().zip(&q).map(|(w, v)| w * v * v).sum();
    Ok(NormalizationReport {
        n,
        value: ratio * ratio,
        mass_part,
        orthonormal,
    })
}

/// Largest |∫ q_i q_j dμ − δ_ij| for i, j ≤ n.
///
/// Point-mass values come from `qn_on_nodes`, so entries against q_0, …, q_{m−1} hold by construction.
pub fn gram_error(
    measure: &ValidatedMeasure,
    coeffs: &RecurrenceCoefficients,
    n: usize,
) -> Result<f64> {
    let q = (0..=n)
        .map(|k| qn_on_nodes(measure, coeffs, k).map(|t| t.2))
        .collect::<Result<Vec<_>>>()?;
    let (_, ws) = measure.discretize();
    let mut worst = 0.0f64;
    for i in 0..=n {
        for j in 0..=i {
            let s: f64 = ws
                .iter()
                .enumerate()
                .map(|(t, w)| w * q[i][t] * q[j][t])
                .sum();
            let d = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((s - d).abs());
        }
    }
    Ok(worst)
}

/// |∫ x q_n² dμ − b_{n+1}|.
pub fn laurent_b_error(
    measure: &ValidatedMeasure,
    coeffs: &RecurrenceCoefficients,
    n: usize,
) -> Result<f64> {
    let (xs, ws, q) = qn_on_nodes(measure, coeffs, n)?;
    let m: f64 = xs
        .iter()
        .zip(&ws)
        .zip(&q)
        .map(|((&x, &w), &v)| w * x * v * v)
        .sum();
    Ok((m - coeffs.b_n(n + 1)).abs())
}

/// |a_n − k_{n−1}/k_n| with k_m read off as the top divided difference of q_m on Chebyshev points of the hull.
pub fn leading_ratio_error(coeffs: &RecurrenceCoefficients, n: usize, hull: (f64, f64)) -> f64 {
    let k = |m: usize| leading_by_interpolation(coeffs, m, hull);
    (coeffs.a_n(n) - k(n - 1) / k(n)).abs()
}

fn leading_by_interpolation(
    coeffs: &RecurrenceCoefficients,
    m: usize,
    (lo, hi): (f64, f64),
) -> f64 {
    if m == 0 {
        return coeffs.eval_qn_real(0, 0.0);
    }
    let (c, r) = (0.5 * (lo + hi), 0.5 * (hi - lo));
    let xs: Vec<f64> = (0..=m)
        .map(|i| c + r * (i as f64 * PI / m as f64).cos())
        .collect();
    xs.iter()
        .enumerate()
        .map(|(i, &xi)| {
            let den: f64 = xs
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, &xj)| xi - xj)
                .product();
            coeffs.eval_qn_real(m, xi) / den
        })
        .sum()
}

#[derive(Debug, Clone, Serialize)]
pub struct Record {
    pub n: usize,
    pub b_actual: f64,
    pub b_predicted: f64,
    pub a_actual: f64,
    pub a_predicted: f64,
    pub thm1_residual: f64,
    pub prop1_error: Option<f64>,
    pub projections: Vec<f64>,
    pub sheets: Vec<i8>,
    pub inversion_residual: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerificationReport {
    pub records: Vec<Record>,
    pub b_fit: DecayVerdict,
    pub a_fit: DecayVerdict,
    pub thm1_fit: DecayVerdict,
    pub prop1_fit: Option<DecayVerdict>,
    /// Degrees where a residual jumped a hundredfold above its running minimum and above 1e−8.
    pub blowups: Vec<usize>,
    pub indexing: String,
}

impl VerificationReport {
    pub fn pass(&self) -> bool {
        self.b_fit.pass
            && self.a_fit.pass
            && self.thm1_fit.pass
            && self.prop1_fit.as_ref().is_none_or(|f| f.pass)
    }
}

fn blowups(ns: &[usize], series: &[&[f64]]) -> Vec<usize> {
    let mut out = Vec::new();
    for s in series {
        let mut best = f64::INFINITY;
        for (n, &r) in ns.iter().zip(s.iter()) {
            if r > 1e-8 && r > 100.0 * best && !out.contains(n) {
                out.push(*n);
            }
            best = best.min(r);
        }
    }
    out.sort_unstable();
    out
}

/// Records for n in `ns` (each needs the divisor at n−1 and n); `prop1_point` adds the ψ check at that ray point.
pub fn verify_theorem2(
    p: &Pipeline,
    ns: &[usize],
    prop1_point: Option<f64>,
) -> Result<VerificationReport> {
    let contour = default_contour(&p.measure);
    let mut records = Vec::with_capacity(ns.len());
    for &n in ns {
        let missing = || Error::DegreeOutOfRange {
            requested: n,
            available: p.n_max(),
        };
        let d = p.divisor(n).ok_or_else(missing)?;
        let prev = p.divisor(n.wrapping_sub(1)).ok_or_else(missing)?;
        let prop1_error = prop1_point.map(|z| verify_prop1(p, n, z)).transpose()?;
        records.push(Record {
            n,
            b_actual: p.coeffs.b_n(n),
            b_predicted: predict_b(&p.surface, prev),
            a_actual: p.coeffs.a_n(n),
            a_predicted: predict_a(&p.surface, d, prev),
            thm1_residual: theorem1_residual(&p.measure, &p.coeffs, &p.surface, n, d, &contour)?,
            prop1_error,
            projections: d.projections(),
            sheets: d
                .points
                .iter()
                .map(|q| if q.sheet == Sheet::First { 1 } else { -1 })
                .collect(),
            inversion_residual: p.solutions[n - p.n_min].residual,
        });
    }
    let b: Vec<f64> = records
        .iter()
        .map(|r| (r.b_actual - r.b_predicted).abs())
        .collect();
    let a: Vec<f64> = records
        .iter()
        .map(|r| (r.a_actual / r.a_predicted - 1.0).abs())
        .collect();
    let t: Vec<f64> = records.iter().map(|r| r.thm1_residual).collect();
    let p1: Option<Vec<f64>> = records.iter().map(|r| r.prop1_error).collect();
    Ok(VerificationReport {
        b_fit: decay_verdict(ns, &b),
        a_fit: decay_verdict(ns, &a),
        thm1_fit: decay_verdict(ns, &t),
        prop1_fit: p1.as_ref().map(|v| decay_verdict(ns, v)),
        blowups: blowups(ns, &[&b, &a, &t]),
        indexing: "b_n from the divisor at n-1; a_n from the divisors at n and n-1; q_n r_n against the divisor at n"
            .to_string(),
        records,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::{MultiBandMeasure, PointMass};
    use approx::assert_abs_diff_eq;

    fn validated(e: &[f64], masses: Vec<PointMass>) -> ValidatedMeasure {
        MultiBandMeasure::from_edges(e, Weight::Constant(1.0), masses)
            .validate()
            .unwrap()
    }

    #[test]
    fn classical_predictions() {
        let p = Pipeline::new(&validated(&[-1.0, 1.0], vec![]), 0, 12, Mode::Asymptotic).unwrap();
        assert_eq!(predict_b(&p.surface, &Divisor::default()), 0.0);
        assert_abs_diff_eq!(
            predict_a(&p.surface, &Divisor::default(), &Divisor::default()),
            0.5,
            epsilon = 1e-12
        );
        let r = verify_theorem2(&p, &(2..=12).collect::<Vec<_>>(), Some(2.0)).unwrap();
        assert!(r.pass());
        assert!(r.records.iter().all(|x| x.thm1_residual.is_finite()));
    }

    #[test]
    fn fit_recovers_slope() {
        let ns: Vec<usize> = (0..20).collect();
        let r: Vec<f64> = ns.iter().map(|&n| 3.0 * (-0.4 * n as f64).exp()).collect();
        let f = log_linear_fit(&ns, &r).unwrap();
        assert_abs_diff_eq!(f.slope, -0.4, epsilon = 1e-12);
        assert_abs_diff_eq!(f.r_squared, 1.0, epsilon = 1e-12);
        assert!(log_linear_fit(&ns[..5], &r[..5]).is_none());
    }

    #[test]
    fn contour_symmetry() {
        let m = validated(&[-1.0, -0.4, 0.0, 1.0], vec![]).normalize();
        let s = Surface::new(m.root().e()).unwrap();
        let c = stieltjes_coefficients(&m, 12).unwrap();
        let z = Complex64::new(0.3, 1.4);
        let d = Divisor::from_angles(s.root(), &[1.0]);
        let f = |z: Complex64| {
            diagonal_green(&m, &c, 10, z).unwrap() - d.x_poly(z) / s.root().eval_w(z).unwrap()
        };
        assert_abs_diff_eq!((f(z).conj() - f(z.conj())).norm(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn leading_coefficient_ratio() {
        let m = validated(&[-1.0, -0.4, 0.0, 1.0], vec![]).normalize();
        let c = stieltjes_coefficients(&m, 20).unwrap();
        for n in 1..20 {
            assert!(leading_ratio_error(&c, n, m.hull()) < 1e-9);
            assert!(laurent_b_error(&m, &c, n).unwrap() < 1e-10);
        }
        assert!(gram_error(&m, &c, 19).unwrap() < 1e-10);
    }
}
