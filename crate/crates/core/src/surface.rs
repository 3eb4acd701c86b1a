//! Functionals of the hyperelliptic surface w² = h(z).
//!
//! Cycle convention: a_j lies over band Δ_j (j < g), with ∮_{a_j} φ dt/w = 2∫_{Δ_j} φ/w⁺.
//! First-kind differentials are dΩ_k = i p_k(t) dt/w(t) with real p_k, so the b-periods
//! B = iT are purely imaginary and the abelian integrals from e_{2g+2} along the real
//! axis have imaginary parts given by real gap integrals.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::Serialize;
use std::f64::consts::PI;

use crate::divisor::{Divisor, Sheet, SurfacePoint};
use crate::error::{Error, Result};
use crate::measure::Weight;
use crate::numerics::{horner, BranchedRoot, GaussLegendre, SegmentRule};

pub const SURFACE_NODES: usize = 200;

#[derive(Debug, Clone)]
pub struct Surface {
    root: BranchedRoot,
    band_rules: Vec<SegmentRule>,
    gap_rules: Vec<SegmentRule>,
    gl: GaussLegendre,
    gl_ray: GaussLegendre,
    gl_tail: GaussLegendre,
    green: Vec<f64>,
    green_roots: Vec<f64>,
    omega: Vec<f64>,
    log_cap: f64,
    diffs: Vec<Vec<f64>>,
    gap_periods: DMatrix<f64>,
    t: DMatrix<f64>,
    t_inv: DMatrix<f64>,
}

/// Serializable summary of a surface.
#[derive(Debug, Clone, Serialize)]
pub struct SurfaceData {
    pub branch_points: Vec<f64>,
    pub genus: usize,
    pub differentials: Vec<Vec<f64>>,
    /// B = i·T; T is stored.
    pub period_imag: Vec<Vec<f64>>,
    pub harmonic_measures: Vec<f64>,
    pub green_roots: Vec<f64>,
    pub capacity: f64,
}

fn solve(m: DMatrix<f64>, rhs: DVector<f64>) -> Result<DVector<f64>> {
    let lu = m.lu();
    lu.solve(&rhs).ok_or(Error::SingularPeriodSystem)
}

impl Surface {
    pub fn new(e: &[f64]) -> Result<Self> {
        Self::with_nodes(e, SURFACE_NODES)
    }

    pub fn with_nodes(e: &[f64], nodes: usize) -> Result<Self> {
        let root = BranchedRoot::new(e.to_vec());
        let g = root.genus();
        let band_rules: Vec<_> = (0..=g).map(|j| root.band_quadrature(j, nodes)).collect();
        let gap_rules: Vec<_> = (0..g).map(|j| root.gap_quadrature(j, nodes)).collect();

        let green = if g == 0 {
            vec![1.0]
        } else {
            let m = DMatrix::from_fn(g, g, |j, s| gap_rules[j].integrate(|x| x.powi(s as i32)));
            let rhs = DVector::from_fn(g, |j, _| -gap_rules[j].integrate(|x| x.powi(g as i32)));
            let mut c: Vec<f64> = solve(m, rhs)?.iter().copied().collect();
            c.push(1.0);
            c
        };
        let green_roots = (0..g)
            .map(|j| bisect(|x| horner(&green, x), e[2 * j + 1], e[2 * j + 2]))
            .collect();
        let omega: Vec<f64> = band_rules
            .iter()
            .map(|r| r.integrate(|x| horner(&green, x).abs()) / PI)
            .collect();
        let gl_tail = GaussLegendre::new(300);
        let log_cap = -root.ray_tail(|t, w| horner(&green, t) / w, 1.0, &gl_tail);

        let diffs: Vec<Vec<f64>> = if g == 0 {
            vec![]
        } else {
            let m = DMatrix::from_fn(g, g, |j, s| {
                2.0 * root.sigma(j) * band_rules[j].integrate(|x| x.powi(s as i32))
            });
            let inv = m.try_inverse().ok_or(Error::SingularPeriodSystem)?;
            (0..g)
                .map(|k| inv.column(k).iter().copied().collect())
                .collect()
        };
        let gap_periods = DMatrix::from_fn(g, g, |k, m| {
            root.sigma(m) * gap_rules[m].integrate(|x| horner(&diffs[k], x))
        });
        let t = DMatrix::from_fn(g, g, |k, j| {
            2.0 * (j..g).map(|m| gap_periods[(k, m)]).sum::<f64>()
        });
        let t_inv = if g == 0 {
            DMatrix::zeros(0, 0)
        } else {
            t.clone().try_inverse().ok_or(Error::SingularPeriodSystem)?
        };
        Ok(Self {
            root,
            band_rules,
            gap_rules,
            gl: GaussLegendre::new(64),
            gl_ray: GaussLegendre::new(64),
            gl_tail,
            green,
            green_roots,
            omega,
            log_cap,
            diffs,
            gap_periods,
            t,
            t_inv,
        })
    }

    pub fn root(&self) -> &BranchedRoot {
        &self.root
    }

    pub fn genus(&self) -> usize {
        self.root.genus()
    }

    pub fn e(&self) -> &[f64] {
        self.root.e()
    }

    pub fn band_integral<F: FnMut(f64) -> f64>(&self, j: usize, f: F) -> f64 {
        self.band_rules[j].integrate(f)
    }

    pub fn gap_integral<F: FnMut(f64) -> f64>(&self, j: usize, f: F) -> f64 {
        self.gap_rules[j].integrate(f)
    }

    pub fn legendre(&self) -> &GaussLegendre {
        &self.gl
    }

    pub fn ray_rule(&self) -> &GaussLegendre {
        &self.gl_ray
    }

    pub fn tail_rule(&self) -> &GaussLegendre {
        &self.gl_tail
    }

    /// Monic Green numerator Y with zero gap integrals of Y/√h.
    pub fn green_numerator(&self) -> &[f64] {
        &self.green
    }

    pub fn green_roots(&self) -> &[f64] {
        &self.green_roots
    }

    /// ω_1(∞)..ω_{g+1}(∞).
    pub fn harmonic_measures(&self) -> &[f64] {
        &self.omega
    }

    pub fn capacity(&self) -> f64 {
        self.log_cap.exp()
    }

    pub fn log_capacity(&self) -> f64 {
        self.log_cap
    }

    /// Equilibrium density |Y(x)|/(π√|h(x)|) on E.
    pub fn equilibrium_density(&self, x: f64) -> f64 {
        match self.root.band_of(x) {
            Some(_) => horner(&self.green, x).abs() / (PI * self.root.h(x.into()).norm().sqrt()),
            None => 0.0,
        }
    }

    /// Coefficients of p_k in dΩ_k = i p_k dt/w.
    pub fn normalized_differentials(&self) -> &[Vec<f64>] {
        &self.diffs
    }

    /// T with B = iT.
    pub fn period_matrix(&self) -> &DMatrix<f64> {
        &self.t
    }

    pub fn period_matrix_complex(&self) -> DMatrix<Complex64> {
        self.t.map(|v| Complex64::new(0.0, v))
    }

    /// ∮_{a_j} dΩ_k.
    pub fn a_period(&self, k: usize, j: usize) -> f64 {
        2.0 * self.root.sigma(j) * self.band_integral(j, |x| horner(&self.diffs[k], x))
    }

    pub fn data(&self) -> SurfaceData {
        let g = self.genus();
        SurfaceData {
            branch_points: self.e().to_vec(),
            genus: g,
            differentials: self.diffs.clone(),
            period_imag: (0..g)
                .map(|k| self.t.row(k).iter().copied().collect())
                .collect(),
            harmonic_measures: self.omega.clone(),
            green_roots: self.green_roots.clone(),
            capacity: self.capacity(),
        }
    }

    /// g_D(x, ∞) for real x.
    pub fn green_real(&self, x: f64) -> f64 {
        let y = |t: f64| horner(&self.green, t);
        let e = self.e();
        if x >= self.root.right() {
            self.root.ray_integral(x, y, &self.gl_ray)
        } else if x <= self.root.left() {
            self.root.left_ray_integral(x, y, &self.gl_ray).abs()
        } else if self.root.band_of(x).is_some() {
            0.0
        } else {
            let j = (0..self.genus())
                .find(|&j| x > e[2 * j + 1] && x < e[2 * j + 2])
                .unwrap_or(0);
            let phi = self.root.segment_angle(2 * j + 1, x);
            self.root.partial_segment(2 * j + 1, phi, y, &self.gl).abs()
        }
    }

    /// Complex Green function ∫ Log(z − x) dω_eq(x) − log cap for z off the real axis.
    pub fn complex_green(&self, z: Complex64) -> Complex64 {
        if z.im == 0.0 {
            return Complex64::new(self.green_real(z.re), 0.0);
        }
        let s: Complex64 = self
            .band_rules
            .iter()
            .flat_map(|r| r.nodes.iter().zip(&r.weights))
            .map(|(&x, &w)| (z - x).ln() * (w * horner(&self.green, x).abs() / PI))
            .sum();
        s - self.log_cap
    }

    pub fn green_function(&self, z: Complex64) -> f64 {
        self.complex_green(z).re
    }

    /// +g_D on the first sheet, −g_D on the second.
    pub fn surface_green(&self, p: SurfacePoint) -> f64 {
        p.sheet.sign() * self.green_real(p.z)
    }

    /// Im Ω_k at the divisor point with angle φ on gap j.
    pub fn abel_gap_point(&self, gap: usize, angle: f64) -> Vec<f64> {
        let i0 = 2 * gap + 1;
        let g = self.genus();
        (0..g)
            .map(|k| {
                let base: f64 = (gap..g).map(|m| self.gap_periods[(k, m)]).sum();
                let part =
                    self.root
                        .partial_segment(i0, angle, |x| horner(&self.diffs[k], x), &self.gl);
                -base + self.root.sigma(gap) * part
            })
            .collect()
    }

    /// ∂ Im Ω_k / ∂φ at the divisor point with angle φ on gap j.
    pub fn abel_gap_derivative(&self, gap: usize, angle: f64) -> Vec<f64> {
        let i0 = 2 * gap + 1;
        let x = self.root.segment_point(i0, angle);
        let s = self.root.sigma(gap) / self.root.rest(x, i0).sqrt();
        self.diffs.iter().map(|p| s * horner(p, x)).collect()
    }

    /// Im Ω_k(x⁽¹⁾) for real x outside the hull.
    pub fn abel_outside(&self, x: f64) -> Vec<f64> {
        let g = self.genus();
        (0..g)
            .map(|k| {
                let p = |t: f64| horner(&self.diffs[k], t);
                if x >= self.root.right() {
                    self.root.ray_integral(x, p, &self.gl_ray)
                } else {
                    let gaps: f64 = (0..g).map(|m| self.gap_periods[(k, m)]).sum();
                    -gaps - self.root.left_ray_integral(x, p, &self.gl_ray)
                }
            })
            .collect()
    }

    /// Im Ω_k(∞⁽¹⁾).
    pub fn abel_infinity(&self) -> Vec<f64> {
        self.diffs
            .iter()
            .map(|p| {
                self.root
                    .ray_tail(|t, w| horner(p, t) / w, 0.0, &self.gl_tail)
            })
            .collect()
    }

    /// Imaginary part of Σ_j Ω_k(𝐳_j) along the real axis from e_{2g+2}.
    pub fn abel_map(&self, divisor: &Divisor) -> AbelImage {
        let g = self.genus();
        let mut imag = vec![0.0; g];
        let mut real = vec![0.0f64; g];
        for p in &divisor.points {
            for (acc, v) in imag.iter_mut().zip(self.abel_gap_point(p.gap, p.angle)) {
                *acc += v;
            }
            for (k, r) in real.iter_mut().enumerate() {
                if k <= p.gap {
                    *r += 0.5;
                }
            }
        }
        real.iter_mut().for_each(|r| *r = r.rem_euclid(1.0));
        AbelImage { imag, real }
    }

    /// v − T·m for the lattice point T·m nearest to v.
    pub fn reduce(&self, v: &[f64]) -> Vec<f64> {
        let g = self.genus();
        if g == 0 {
            return vec![];
        }
        let vv = DVector::from_column_slice(v);
        let m0 = (&self.t_inv * &vv).map(f64::round);
        let mut best = vv.clone() - &self.t * &m0;
        let mut best_norm = best.norm();
        let combos = 3usize.pow(g as u32);
        for c in 0..combos {
            let mut d = m0.clone();
            let mut cc = c;
            for i in 0..g {
                d[i] += (cc % 3) as f64 - 1.0;
                cc /= 3;
            }
            let r = &vv - &self.t * &d;
            if r.norm() < best_norm {
                best_norm = r.norm();
                best = r;
            }
        }
        best.iter().copied().collect()
    }

    pub fn lattice_coordinates(&self, v: &[f64]) -> Vec<f64> {
        (&self.t_inv * DVector::from_column_slice(v))
            .iter()
            .copied()
            .collect()
    }

    pub fn t_times(&self, v: &[f64]) -> Vec<f64> {
        (&self.t * DVector::from_column_slice(v))
            .iter()
            .copied()
            .collect()
    }

    /// Harmonic measures ω_1..ω_{g+1} at a real point.
    pub fn harmonic_measures_at(&self, x: f64) -> Vec<f64> {
        let g = self.genus();
        if let Some(j) = self.root.band_of(x) {
            return (0..=g).map(|k| if k == j { 1.0 } else { 0.0 }).collect();
        }
        let e = self.e();
        let u = if x > self.root.right() || x < self.root.left() {
            self.abel_outside(x)
        } else {
            let j = (0..g)
                .find(|&j| x > e[2 * j + 1] && x < e[2 * j + 2])
                .unwrap_or(0);
            self.abel_gap_point(j, self.root.segment_angle(2 * j + 1, x))
        };
        let mut w: Vec<f64> = self
            .lattice_coordinates(&u)
            .iter()
            .map(|v| -2.0 * v)
            .collect();
        w.push(1.0 - w.iter().sum::<f64>());
        w
    }

    /// Real part of the weight term (1/π)∫ log ρ dΩ_k⁺.
    pub fn weight_term(&self, weight: &Weight) -> Vec<f64> {
        let g = self.genus();
        self.diffs
            .iter()
            .map(|p| {
                (0..=g)
                    .map(|m| {
                        self.root.sigma(m) * self.band_integral(m, |x| weight.log(x) * horner(p, x))
                    })
                    .sum::<f64>()
                    / PI
            })
            .collect()
    }

    /// Normalized third-kind differential with residues +1 at p and −1 at q.
    pub fn third_kind(&self, p: Pole, q: Pole) -> Result<ThirdKind> {
        let g = self.genus();
        let mut tk = ThirdKind {
            finite: vec![],
            infinite: vec![],
            holo: vec![0.0; g],
        };
        for (pole, r) in [(p, 1.0), (q, -1.0)] {
            match pole {
                Pole::Point(s) => {
                    if self.root.band_of(s.z).is_some() && !self.e().contains(&s.z) {
                        return Err(Error::EvaluationOffSupportedRay(s.z));
                    }
                    let wp = s.sheet.sign() * self.root.w_real(s.z);
                    tk.finite.push(FinitePole {
                        z: s.z,
                        sheet: s.sheet,
                        w: wp,
                        residue: r,
                    });
                }
                Pole::Infinity(sheet) => tk.infinite.push((sheet, r)),
            }
        }
        if g > 0 {
            let m = DMatrix::from_fn(g, g, |j, s| self.band_integral(j, |x| x.powi(s as i32)));
            let rhs = DVector::from_fn(g, |j, _| -self.band_integral(j, |x| tk.numerator(g, x)));
            tk.holo = solve(m, rhs)?.iter().copied().collect();
        }
        Ok(tk)
    }

    /// Ω(p, q; z⁽¹⁾) for real z > e_{2g+2}.
    pub fn third_kind_integral(&self, p: Pole, q: Pole, z: f64) -> Result<f64> {
        if p == q {
            return Ok(0.0);
        }
        self.third_kind(p, q)?.eval(self, z)
    }

    /// Szegő data for a weight: the g constants v_k and the leading coefficient at ∞.
    pub fn szego(&self, weight: &Weight) -> Result<Szego> {
        let g = self.genus();
        let lr = |x: f64| weight.log(x);
        let v: Vec<f64> = if g == 0 {
            vec![]
        } else {
            let m = DMatrix::from_fn(g, g, |s, k| {
                self.root.sigma(k) * self.band_integral(k, |x| x.powi(s as i32))
            });
            let rhs = DVector::from_fn(g, |s, _| {
                -(0..=g)
                    .map(|k| {
                        self.root.sigma(k) * self.band_integral(k, |x| lr(x) * x.powi(s as i32))
                    })
                    .sum::<f64>()
            });
            solve(m, rhs)?.iter().copied().collect()
        };
        let vm = |m: usize| if m < g { v[m] } else { 0.0 };
        let mu_g: f64 = (0..=g)
            .map(|m| {
                self.root.sigma(m) * self.band_integral(m, |x| (lr(x) + vm(m)) * x.powi(g as i32))
            })
            .sum();
        Ok(Szego {
            weight: weight.clone(),
            v,
            mu_g,
        })
    }

    /// A(z⁽¹⁾; ρ) on the ray z > e_{2g+2}, with e^{c} = ∏(e_{2g+2} − z_j).
    pub fn szego_a(&self, szego: &Szego, divisor: &Divisor, z: f64) -> Result<f64> {
        if z <= self.root.right() {
            return Err(Error::EvaluationOffSupportedRay(z));
        }
        Ok(szego.w_times_cauchy(self, z) + 0.5 * c_last(self, divisor))
    }

    /// PV ∫_{gap j} f(t)/((t − p)√|h(t)|) dt; plain integral when p is outside the gap.
    pub fn gap_pv<F: Fn(f64) -> f64>(&self, j: usize, f: F, p: f64) -> f64 {
        let r = &self.gap_rules[j];
        let e = self.e();
        if !(p > e[2 * j + 1] && p < e[2 * j + 2]) {
            return r.integrate(|t| f(t) / (t - p));
        }
        let i0 = 2 * j + 1;
        let fp = f(p) / self.root.rest(p, i0).sqrt();
        let n = r.nodes.len() as f64;
        r.nodes
            .iter()
            .zip(&r.weights)
            .map(|(&t, &w)| (w * f(t) - PI / n * fp) / (t - p))
            .sum()
    }
}

/// log ∏(e_{2g+2} − z_j).
pub fn c_last(surface: &Surface, divisor: &Divisor) -> f64 {
    let e = surface.root.right();
    divisor.points.iter().map(|p| (e - p.z).ln()).sum()
}

fn bisect<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64) -> f64 {
    let fa = f(a);
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if (f(m) > 0.0) == (fa > 0.0) {
            a = m;
        } else {
            b = m;
        }
        if b - a < 1e-16 * (1.0 + a.abs()) {
            break;
        }
    }
    0.5 * (a + b)
}

#[derive(Debug, Clone, Serialize)]
pub struct AbelImage {
    /// Coordinates in the b-lattice direction (B = iT).
    pub imag: Vec<f64>,
    /// Half-integer real parts modulo 1.
    pub real: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Pole {
    Point(SurfacePoint),
    Infinity(Sheet),
}

#[derive(Debug, Clone, Copy)]
struct FinitePole {
    z: f64,
    sheet: Sheet,
    w: f64,
    residue: f64,
}

/// dΩ = [Σ r·½(1 + w_p/w)/(t − p)] dt + N_∞(t) dt/w with zero a-periods.
#[derive(Debug, Clone)]
pub struct ThirdKind {
    finite: Vec<FinitePole>,
    infinite: Vec<(Sheet, f64)>,
    holo: Vec<f64>,
}

impl ThirdKind {
    /// Odd numerator N(t): dΩ − (even part) = N dt/w.
    pub fn numerator(&self, g: usize, t: f64) -> f64 {
        let fin: f64 = self
            .finite
            .iter()
            .map(|p| p.residue * 0.5 * p.w / (t - p.z))
            .sum();
        let inf: f64 = self
            .infinite
            .iter()
            .map(|(s, r)| -r * s.sign() * 0.5 * t.powi(g as i32))
            .sum();
        fin + inf + horner(&self.holo, t)
    }

    fn singular(&self, root: &BranchedRoot) -> impl Iterator<Item = &FinitePole> + '_ {
        let e = root.right();
        self.finite
            .iter()
            .filter(move |p| p.sheet == Sheet::First && p.z > e)
    }

    /// Ray integrand with the log singularities of first-sheet ray poles removed.
    fn regular(&self, s: &Surface, t: f64, w: f64) -> f64 {
        let even: f64 = self
            .finite
            .iter()
            .map(|p| p.residue * 0.5 / (t - p.z))
            .sum();
        let sing: f64 = self.singular(&s.root).map(|p| p.residue / (t - p.z)).sum();
        even - sing + self.numerator(s.genus(), t) / w
    }

    pub fn eval(&self, s: &Surface, z: f64) -> Result<f64> {
        let e = s.root.right();
        if z <= e {
            return Err(Error::EvaluationOffSupportedRay(z));
        }
        let l = (z - e).sqrt();
        let reg = s.ray_rule().integrate_graded(0.0, l, |u| {
            2.0 * u * self.regular(s, e + u * u, s.root.w_right(u))
        });
        let logs: f64 = self
            .singular(&s.root)
            .map(|p| p.residue * ((z - p.z) / (e - p.z)).abs().ln())
            .sum();
        Ok(reg + logs)
    }

    /// Closed form of the even part ∫ Σ r·½/(t − p) dt from e_{2g+2} to z.
    pub fn even(&self, s: &Surface, z: f64) -> f64 {
        let e = s.root.right();
        self.finite
            .iter()
            .map(|p| 0.5 * p.residue * ((z - p.z) / (e - p.z)).abs().ln())
            .sum()
    }

    /// (c, K) with Ω(z) = c·log z + K + o(1) as z → +∞.
    pub fn asymptotics(&self, s: &Surface) -> (f64, f64) {
        let e = s.root.right();
        let fin: f64 = self.finite.iter().map(|p| 0.5 * p.residue).sum();
        let sing: f64 = self.singular(&s.root).map(|p| p.residue).sum();
        let inf: f64 = self
            .infinite
            .iter()
            .map(|(sh, r)| -r * sh.sign() * 0.5)
            .sum();
        let c = fin - sing + inf;
        let fp = s
            .root
            .ray_tail(|t, w| self.regular(s, t, w), c, s.tail_rule());
        let logs: f64 = self
            .singular(&s.root)
            .map(|p| -p.residue * (e - p.z).abs().ln())
            .sum();
        (c + sing, fp + logs)
    }

    /// Real part of the odd integral at the upper side of band m < g.
    pub fn band_constant(&self, s: &Surface, m: usize) -> f64 {
        let g = s.genus();
        (m..g)
            .map(|i| {
                let sig = s.root.sigma(i);
                let poles: f64 = self
                    .finite
                    .iter()
                    .map(|p| s.gap_pv(i, |_| p.residue * 0.5 * p.w, p.z))
                    .sum();
                let rest = s.gap_integral(i, |t| {
                    let inf: f64 = self
                        .infinite
                        .iter()
                        .map(|(sh, r)| -r * sh.sign() * 0.5 * t.powi(g as i32))
                        .sum();
                    inf + horner(&self.holo, t)
                });
                -sig * (poles + rest)
            })
            .sum()
    }
}

/// Constants of the Szegő-type term for one weight.
#[derive(Debug, Clone)]
pub struct Szego {
    pub weight: Weight,
    pub v: Vec<f64>,
    pub mu_g: f64,
}

impl Szego {
    fn v_band(&self, m: usize) -> f64 {
        self.v.get(m).copied().unwrap_or(0.0)
    }

    /// w(z)·{(1/2πi)∫ log ρ/((z − x)w⁺) + v-terms} on the ray.
    pub fn w_times_cauchy(&self, s: &Surface, z: f64) -> f64 {
        let g = s.genus();
        let c: f64 = (0..=g)
            .map(|m| {
                s.root.sigma(m)
                    * s.band_integral(m, |x| (self.weight.log(x) + self.v_band(m)) / (z - x))
            })
            .sum::<f64>()
            * (-0.5 / PI);
        s.root.w_real(z) * c
    }

    /// lim_{z→∞} of w·{…}.
    pub fn at_infinity(&self) -> f64 {
        -self.mu_g / (2.0 * PI)
    }

    /// ½ of the jump of Re A across band m (for m < g): −½ v_m.
    pub fn band_shift(&self, m: usize) -> f64 {
        -0.5 * self.v_band(m)
    }
}
