//! Jacobi inversion for the divisor at degree n, the divisor flow and the angle law.

use nalgebra::{DMatrix, DVector};
use rand::{rngs::StdRng, Rng, SeedableRng};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::divisor::{Divisor, Sheet};
use crate::error::{Error, Result};
use crate::measure::ValidatedMeasure;
use crate::surface::Surface;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// Each mass enters twice at its own location.
    #[default]
    Asymptotic,
    /// Each mass enters once at its location and once at the spurious pole of q_n.
    ExactN,
}

impl std::str::FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "asymptotic" => Ok(Mode::Asymptotic),
            "exact-n" => Ok(Mode::ExactN),
            other => Err(format!(
                "unknown mode `{other}` (expected asymptotic or exact-n)"
            )),
        }
    }
}

/// Right side of the inversion problem at degree n, in the imaginary (b-lattice) coordinates.
#[derive(Debug, Clone, Serialize)]
pub struct InversionTarget {
    pub n: usize,
    pub mode: Mode,
    /// Unreduced sum of the three terms.
    pub raw: Vec<f64>,
    /// `raw` reduced to the fundamental cell.
    pub rhs: Vec<f64>,
    pub period_term: Vec<f64>,
    pub weight_term: Vec<f64>,
    pub mass_term: Vec<f64>,
}

/// `spurious` holds ζ_{s,n} per mass and is only read in exact-n mode.
pub fn inversion_rhs(
    surface: &Surface,
    measure: &ValidatedMeasure,
    n: usize,
    mode: Mode,
    spurious: &[f64],
) -> Result<InversionTarget> {
    let g = surface.genus();
    let omega = &surface.harmonic_measures()[..g];
    let shift = n as f64 - 0.5 * g as f64;
    let period_term: Vec<f64> = surface.t_times(omega).iter().map(|v| -shift * v).collect();
    let weight_term = surface.weight_term(measure.weight());
    let mut mass_term = vec![0.0; g];
    for (s, m) in measure.masses().iter().enumerate() {
        let partner = match mode {
            Mode::Asymptotic => m.location,
            Mode::ExactN => *spurious.get(s).ok_or(Error::MissingSpuriousPole {
                location: m.location,
                n,
            })?,
        };
        let a = surface.abel_outside(m.location);
        let b = surface.abel_outside(partner);
        for k in 0..g {
            mass_term[k] += a[k] + b[k];
        }
    }
    let raw: Vec<f64> = (0..g)
        .map(|k| period_term[k] - weight_term[k] - mass_term[k])
        .collect();
    Ok(InversionTarget {
        n,
        mode,
        rhs: surface.reduce(&raw),
        raw,
        period_term,
        weight_term,
        mass_term,
    })
}

#[derive(Debug, Clone, Copy)]
pub struct NewtonSettings {
    pub tolerance: f64,
    pub max_iterations: usize,
    pub restarts: usize,
    pub seed: u64,
}

impl Default for NewtonSettings {
    fn default() -> Self {
        Self {
            tolerance: 1e-12,
            max_iterations: 40,
            restarts: 3,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct InversionSolution {
    pub divisor: Divisor,
    pub residual: f64,
    pub iterations: usize,
    pub restarts: usize,
}

/// Abel image of the divisor with the given torus angles.
pub fn abel_of_angles(surface: &Surface, angles: &[f64]) -> Vec<f64> {
    let g = surface.genus();
    angles
        .iter()
        .enumerate()
        .fold(vec![0.0; g], |mut acc, (j, &a)| {
            for (s, v) in acc.iter_mut().zip(surface.abel_gap_point(j, a)) {
                *s += v;
            }
            acc
        })
}

fn residual(surface: &Surface, angles: &[f64], target: &[f64]) -> Vec<f64> {
    let u = abel_of_angles(surface, angles);
    let d: Vec<f64> = u.iter().zip(target).map(|(a, b)| a - b).collect();
    surface.reduce(&d)
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn jacobian(surface: &Surface, angles: &[f64]) -> DMatrix<f64> {
    let g = surface.genus();
    let cols: Vec<Vec<f64>> = angles
        .iter()
        .enumerate()
        .map(|(j, &a)| surface.abel_gap_derivative(j, a))
        .collect();
    DMatrix::from_fn(g, g, |k, j| cols[j][k])
}

fn newton(
    surface: &Surface,
    target: &[f64],
    start: Vec<f64>,
    s: &NewtonSettings,
) -> (Vec<f64>, f64, usize) {
    let mut phi = start;
    let mut f = residual(surface, &phi, target);
    let mut fnorm = norm(&f);
    let mut it = 0;
    while it < s.max_iterations && fnorm >= s.tolerance {
        it += 1;
        let Some(d) = jacobian(surface, &phi)
            .lu()
            .solve(&DVector::from_column_slice(&f))
        else {
            break;
        };
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..16 {
            let trial: Vec<f64> = phi
                .iter()
                .zip(d.iter())
                .map(|(p, dp)| p - lambda * dp)
                .collect();
            let ft = residual(surface, &trial, target);
            let nt = norm(&ft);
            if nt < fnorm {
                phi = trial;
                f = ft;
                fnorm = nt;
                accepted = true;
                break;
            }
            lambda *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    (phi, fnorm, it)
}

/// Damped Newton on the torus angles; warm start first, then seeded random restarts.
pub fn solve_inversion(
    surface: &Surface,
    target: &InversionTarget,
    warm_start: Option<&Divisor>,
    settings: &NewtonSettings,
) -> Result<InversionSolution> {
    let g = surface.genus();
    if g == 0 {
        return Ok(InversionSolution {
            divisor: Divisor::default(),
            residual: 0.0,
            iterations: 0,
            restarts: 0,
        });
    }
    let mut rng = StdRng::seed_from_u64(settings.seed ^ target.n as u64);
    let first = warm_start
        .filter(|d| d.len() == g)
        .map(|d| d.angles())
        .unwrap_or_else(|| vec![0.5 * PI; g]);
    let mut best = f64::INFINITY;
    for attempt in 0..=settings.restarts {
        let start = if attempt == 0 {
            first.clone()
        } else {
            (0..g).map(|_| rng.gen_range(-PI..PI)).collect()
        };
        let (phi, res, iterations) = newton(surface, &target.rhs, start, settings);
        if res < 1e-10 {
            let divisor = Divisor::from_angles(surface.root(), &phi);
            let residual = norm(&residual(surface, &divisor.angles(), &target.rhs));
            return Ok(InversionSolution {
                divisor,
                residual,
                iterations,
                restarts: attempt,
            });
        }
        best = best.min(res);
    }
    Err(Error::NewtonDivergence { residual: best })
}

/// Solves for consecutive targets, warm-starting each from the previous divisor.
pub fn solve_sequence(
    surface: &Surface,
    targets: &[InversionTarget],
    settings: &NewtonSettings,
) -> Result<Vec<InversionSolution>> {
    let mut out: Vec<InversionSolution> = Vec::with_capacity(targets.len());
    for t in targets {
        let warm = out.last().map(|s| &s.divisor);
        out.push(solve_inversion(surface, t, warm, settings)?);
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize)]
pub struct FlowSample {
    pub t: f64,
    pub angles: Vec<f64>,
    pub projections: Vec<f64>,
    pub sheets: Vec<i8>,
}

/// The point of gap `gap` reached an edge and switched sheets.
#[derive(Debug, Clone, Serialize)]
pub struct EdgeEvent {
    pub t: f64,
    pub gap: usize,
    pub edge: f64,
}

#[derive(Debug, Clone, Serialize, Default)]
pub struct Trajectory {
    pub samples: Vec<FlowSample>,
    pub events: Vec<EdgeEvent>,
}

#[derive(Debug, Clone, Copy)]
pub struct FlowSettings {
    /// Multiplies the right side; 1 is the literal system.
    pub time_scale: f64,
    pub rtol: f64,
    pub atol: f64,
}

impl Default for FlowSettings {
    fn default() -> Self {
        Self {
            time_scale: 1.0,
            rtol: 1e-11,
            atol: 1e-12,
        }
    }
}

/// dz_j/dt = −w(z_j)/∏_{k≠j}(z_j − z_k) · ∫_{e_{2g+2}}^∞ ∏_{k≠j}(x − z_k)/√h dx, written for the angles.
pub fn flow_velocity(surface: &Surface, angles: &[f64], scale: f64) -> Vec<f64> {
    let root = surface.root();
    let xs: Vec<f64> = angles
        .iter()
        .enumerate()
        .map(|(j, &a)| root.segment_point(2 * j + 1, a))
        .collect();
    (0..xs.len())
        .map(|j| {
            let others = || {
                xs.iter()
                    .enumerate()
                    .filter(move |&(k, _)| k != j)
                    .map(|(_, &x)| x)
            };
            let integral = root.ray_tail(
                |t, w| others().map(|x| t - x).product::<f64>() / w,
                0.0,
                surface.tail_rule(),
            );
            let denom: f64 = others().map(|x| xs[j] - x).product();
            -scale * root.sigma(j) * root.rest(xs[j], 2 * j + 1).sqrt() * integral / denom
        })
        .collect()
}

const DP_A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const DP_E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// One Dormand–Prince 5(4) step: (fifth-order value, error estimate).
fn dopri_step<F: Fn(&[f64]) -> Vec<f64>>(f: &F, y: &[f64], h: f64) -> (Vec<f64>, Vec<f64>) {
    let n = y.len();
    let mut k: Vec<Vec<f64>> = Vec::with_capacity(7);
    for s in 0..7 {
        let ys: Vec<f64> = (0..n)
            .map(|i| y[i] + h * (0..s).map(|r| DP_A[s][r] * k[r][i]).sum::<f64>())
            .collect();
        k.push(f(&ys));
    }
    let y5: Vec<f64> = (0..n)
        .map(|i| y[i] + h * (0..6).map(|r| DP_A[6][r] * k[r][i]).sum::<f64>())
        .collect();
    let err: Vec<f64> = (0..n)
        .map(|i| h * (0..7).map(|r| DP_E[r] * k[r][i]).sum::<f64>())
        .collect();
    (y5, err)
}

fn sample(surface: &Surface, t: f64, angles: &[f64]) -> FlowSample {
    let d = Divisor::from_angles(surface.root(), angles);
    FlowSample {
        t,
        angles: d.angles(),
        projections: d.projections(),
        sheets: d
            .points
            .iter()
            .map(|p| if p.sheet == Sheet::First { 1 } else { -1 })
            .collect(),
    }
}

/// Integrates the flow from `d0`, sampling at multiples of `dt` up to `steps·dt`.
pub fn divisor_flow(
    surface: &Surface,
    d0: &Divisor,
    steps: usize,
    dt: f64,
    settings: &FlowSettings,
) -> Result<Trajectory> {
    let g = surface.genus();
    let mut traj = Trajectory::default();
    let mut y = d0.angles();
    traj.samples.push(sample(surface, 0.0, &y));
    if g == 0 || steps == 0 {
        return Ok(traj);
    }
    let f = |phi: &[f64]| flow_velocity(surface, phi, settings.time_scale);
    let mut t = 0.0;
    let mut h = 0.05 * dt;
    for step in 1..=steps {
        let t_end = step as f64 * dt;
        while t < t_end - 1e-15 * t_end.abs().max(1.0) {
            let hh = h.min(t_end - t);
            let (y5, err) = dopri_step(&f, &y, hh);
            let scaled = err
                .iter()
                .zip(&y5)
                .map(|(e, v)| e / (settings.atol + settings.rtol * v.abs()))
                .fold(0.0f64, |m, x| m.max(x.abs()));
            if scaled <= 1.0 {
                record_edges(surface, &f, t, &y, hh, &y5, &mut traj.events);
                t += hh;
                y = y5;
            }
            let factor = if scaled == 0.0 {
                5.0
            } else {
                (0.9 * scaled.powf(-0.2)).clamp(0.2, 5.0)
            };
            h = hh * factor;
            if h < 1e-13 * t.abs().max(1.0) {
                return Err(Error::StepCollapse { t });
            }
        }
        traj.samples.push(sample(surface, t, &y));
    }
    Ok(traj)
}

fn record_edges<F: Fn(&[f64]) -> Vec<f64>>(
    surface: &Surface,
    f: &F,
    t0: f64,
    y0: &[f64],
    h: f64,
    y1: &[f64],
    events: &mut Vec<EdgeEvent>,
) {
    let e = surface.e();
    for j in 0..y0.len() {
        let (k0, k1) = ((y0[j] / PI).floor(), (y1[j] / PI).floor());
        if k0 == k1 {
            continue;
        }
        let m = k0.max(k1);
        let target = m * PI;
        let (mut lo, mut hi) = (0.0, h);
        for _ in 0..40 {
            let mid = 0.5 * (lo + hi);
            let (ym, _) = dopri_step(f, y0, mid);
            if (ym[j] - target) * (y0[j] - target) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let edge = if (m as i64).rem_euclid(2) == 0 {
            e[2 * j + 1]
        } else {
            e[2 * j + 2]
        };
        events.push(EdgeEvent {
            t: t0 + 0.5 * (lo + hi),
            gap: j,
            edge,
        });
    }
}

/// Scale relating flow time to degree steps.
#[derive(Debug, Clone, Serialize)]
pub struct FlowCalibration {
    pub factor: f64,
    /// True when the factor differs from 1 by more than 1e−3.
    pub flagged: bool,
    /// d(Abel image)/dt of the literal flow.
    pub velocity: Vec<f64>,
    /// Least-squares residual of the fit.
    pub fit_residual: f64,
}

/// Lifts the Abel image of a solved divisor to the representative nearest the unreduced target.
pub fn lifted_abel(surface: &Surface, divisor: &Divisor, raw_target: &[f64]) -> Vec<f64> {
    let u = abel_of_angles(surface, &divisor.angles());
    let d: Vec<f64> = u.iter().zip(raw_target).map(|(a, b)| a - b).collect();
    let r = surface.reduce(&d);
    raw_target.iter().zip(&r).map(|(a, b)| a + b).collect()
}

/// Least-squares time unit over the first steps of an inversion sequence.
pub fn calibrate_flow(
    surface: &Surface,
    targets: &[InversionTarget],
    solutions: &[InversionSolution],
    steps: usize,
) -> Result<FlowCalibration> {
    let g = surface.genus();
    if g == 0 || solutions.len() < 2 {
        return Ok(FlowCalibration {
            factor: 1.0,
            flagged: false,
            velocity: vec![],
            fit_residual: 0.0,
        });
    }
    let d0 = &solutions[0].divisor;
    let probe = 1e-2;
    let traj = divisor_flow(surface, d0, 1, probe, &FlowSettings::default())?;
    let a0 = abel_of_angles(surface, &d0.angles());
    let a1 = abel_of_angles(surface, &traj.samples[1].angles);
    let diff: Vec<f64> = a1.iter().zip(&a0).map(|(a, b)| a - b).collect();
    let velocity: Vec<f64> = surface.reduce(&diff).iter().map(|v| v / probe).collect();

    let base = lifted_abel(surface, d0, &targets[0].raw);
    let steps = steps.min(solutions.len() - 1);
    let disp: Vec<Vec<f64>> = (1..=steps)
        .map(|k| {
            let u = lifted_abel(surface, &solutions[k].divisor, &targets[k].raw);
            u.iter().zip(&base).map(|(a, b)| a - b).collect()
        })
        .collect();
    let vv: f64 = velocity.iter().map(|v| v * v).sum();
    let num: f64 = disp
        .iter()
        .enumerate()
        .map(|(i, d)| (i + 1) as f64 * d.iter().zip(&velocity).map(|(a, b)| a * b).sum::<f64>())
        .sum();
    let den: f64 = (1..=steps).map(|k| (k * k) as f64).sum::<f64>() * vv;
    let factor = num / den;
    let fit_residual = disp
        .iter()
        .enumerate()
        .map(|(i, d)| {
            d.iter()
                .zip(&velocity)
                .map(|(a, v)| (a - factor * (i + 1) as f64 * v).powi(2))
                .sum::<f64>()
        })
        .sum::<f64>()
        .sqrt();
    Ok(FlowCalibration {
        factor,
        flagged: (factor - 1.0).abs() > 1e-3,
        velocity,
        fit_residual,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct AngleLawReport {
    /// Per step, the increment of Σ_j ε_j ω_k(z_j) for k = 1..g.
    pub increments: Vec<Vec<f64>>,
    /// −2ω_k(∞).
    pub expected: Vec<f64>,
    pub max_deviation: f64,
}

/// Distance of x to 0 modulo 2.
fn mod2_distance(x: f64) -> f64 {
    let r = x.rem_euclid(2.0);
    r.min(2.0 - r)
}

/// Σ_j ε_j ω_k(z_j) with the sheet sign taken in the flow's orientation.
pub fn angle_sum(surface: &Surface, divisor: &Divisor) -> Vec<f64> {
    let g = surface.genus();
    divisor.points.iter().fold(vec![0.0; g], |mut acc, p| {
        let om = surface.harmonic_measures_at(p.z);
        let eps = -p.sheet.sign();
        for k in 0..g {
            acc[k] += eps * om[k];
        }
        acc
    })
}

pub fn angle_law_check(surface: &Surface, divisors: &[Divisor]) -> AngleLawReport {
    let g = surface.genus();
    let expected: Vec<f64> = surface.harmonic_measures()[..g]
        .iter()
        .map(|w| -2.0 * w)
        .collect();
    let sums: Vec<Vec<f64>> = divisors.iter().map(|d| angle_sum(surface, d)).collect();
    let increments: Vec<Vec<f64>> = sums
        .windows(2)
        .map(|w| (0..g).map(|k| w[1][k] - w[0][k]).collect())
        .collect();
    let max_deviation = increments
        .iter()
        .flat_map(|inc| inc.iter().zip(&expected).map(|(a, b)| mod2_distance(a - b)))
        .fold(0.0, f64::max);
    AngleLawReport {
        increments,
        expected,
        max_deviation,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::{MultiBandMeasure, Weight};
    use approx::assert_abs_diff_eq;

    fn measure(e: &[f64]) -> ValidatedMeasure {
        MultiBandMeasure::from_edges(e, Weight::Constant(1.0), vec![])
            .validate()
            .unwrap()
    }

    #[test]
    fn genus_zero_is_trivial() {
        let s = Surface::new(&[-1.0, 1.0]).unwrap();
        let t = inversion_rhs(&s, &measure(&[-1.0, 1.0]), 3, Mode::Asymptotic, &[]).unwrap();
        assert!(t.rhs.is_empty());
        let sol = solve_inversion(&s, &t, None, &NewtonSettings::default()).unwrap();
        assert!(sol.divisor.is_empty());
        assert_eq!(
            angle_law_check(&s, &[sol.divisor.clone(), sol.divisor]).max_deviation,
            0.0
        );
    }

    #[test]
    fn step_in_n_is_minus_t_omega() {
        let e = [-2.0, -1.2, -0.9, 0.1, 0.5, 1.3];
        let s = Surface::new(&e).unwrap();
        let m = measure(&e);
        let a = inversion_rhs(&s, &m, 5, Mode::Asymptotic, &[]).unwrap();
        let b = inversion_rhs(&s, &m, 6, Mode::Asymptotic, &[]).unwrap();
        let tw = s.t_times(&s.harmonic_measures()[..2]);
        let d: Vec<f64> = (0..2).map(|k| b.rhs[k] - a.rhs[k] + tw[k]).collect();
        assert!(s.reduce(&d).iter().all(|x| x.abs() < 1e-12));
    }

    #[test]
    fn exact_mode_needs_spurious_poles() {
        let e = [-1.0, -0.4, 0.0, 1.0];
        let s = Surface::new(&e).unwrap();
        let m = MultiBandMeasure::from_edges(
            &e,
            Weight::Constant(1.0),
            vec![crate::PointMass {
                location: 2.0,
                weight: 0.1,
            }],
        )
        .validate()
        .unwrap();
        assert!(matches!(
            inversion_rhs(&s, &m, 4, Mode::ExactN, &[]),
            Err(Error::MissingSpuriousPole { .. })
        ));
        let a = inversion_rhs(&s, &m, 4, Mode::Asymptotic, &[]).unwrap();
        let b = inversion_rhs(&s, &m, 4, Mode::ExactN, &[2.0]).unwrap();
        assert_abs_diff_eq!(a.rhs[0], b.rhs[0], epsilon = 1e-14);
    }

    #[test]
    fn newton_solves_genus_two() {
        let e = [-2.0, -1.2, -0.9, 0.1, 0.5, 1.3];
        let s = Surface::new(&e).unwrap();
        let m = measure(&e);
        let targets: Vec<_> = (2..12)
            .map(|n| inversion_rhs(&s, &m, n, Mode::Asymptotic, &[]).unwrap())
            .collect();
        let sols = solve_sequence(&s, &targets, &NewtonSettings::default()).unwrap();
        for (t, sol) in targets.iter().zip(&sols) {
            assert!(sol.residual < 1e-10);
            let again = residual(&s, &sol.divisor.angles(), &t.rhs);
            assert!(norm(&again) < 1e-10);
        }
        for sol in &sols[1..] {
            assert!(sol.iterations <= 6, "{}", sol.iterations);
        }
        let report = angle_law_check(
            &s,
            &sols.iter().map(|x| x.divisor.clone()).collect::<Vec<_>>(),
        );
        assert!(report.max_deviation < 1e-8, "{}", report.max_deviation);
    }

    #[test]
    fn flow_moves_abel_image_linearly() {
        let e = [-1.0, -0.4, 0.0, 1.0];
        let s = Surface::new(&e).unwrap();
        let d0 = Divisor::from_angles(s.root(), &[0.3]);
        let traj = divisor_flow(&s, &d0, 20, 0.25, &FlowSettings::default()).unwrap();
        let v = s.abel_infinity();
        let u0 = abel_of_angles(&s, &d0.angles());
        for smp in &traj.samples {
            let u = abel_of_angles(&s, &smp.angles);
            let d = [u[0] - u0[0] + smp.t * v[0]];
            assert!(s.reduce(&d)[0].abs() < 1e-8, "{}", s.reduce(&d)[0]);
        }
        assert!(!traj.events.is_empty());
    }

    #[test]
    fn flow_leaves_gap_edge() {
        let e = [-1.0, -0.5, 0.5, 1.0];
        let s = Surface::new(&e).unwrap();
        let d0 = Divisor::from_angles(s.root(), &[0.0]);
        let traj = divisor_flow(&s, &d0, 4, 0.1, &FlowSettings::default()).unwrap();
        assert!(traj.samples[1].projections[0] > -0.5);
    }
}
