//! Three-term recurrence of the orthonormal polynomials and the second-kind objects.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::measure::ValidatedMeasure;

/// a[k] = a_{k+1}, b[k] = b_{k+1}; a_0 = 1 is implicit.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecurrenceCoefficients {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

impl RecurrenceCoefficients {
    pub fn len(&self) -> usize {
        self.a.len()
    }

    pub fn is_empty(&self) -> bool {
        self.a.is_empty()
    }

    /// a_n with a_0 = 1.
    pub fn a_n(&self, n: usize) -> f64 {
        if n == 0 {
            1.0
        } else {
            self.a[n - 1]
        }
    }

    pub fn b_n(&self, n: usize) -> f64 {
        self.b[n - 1]
    }

    fn check(&self, n: usize) -> Result<()> {
        if n > self.len() {
            return Err(Error::DegreeOutOfRange {
                requested: n,
                available: self.len(),
            });
        }
        Ok(())
    }

    /// (q_{n−1}(z), q_n(z)).
    fn pair(&self, n: usize, z: Complex64, init: (Complex64, Complex64)) -> (Complex64, Complex64) {
        let (mut prev, mut cur) = init;
        for k in 1..=n {
            let next = ((z - self.b[k - 1]) * cur - self.a_n(k - 1) * prev) / self.a[k - 1];
            prev = cur;
            cur = next;
        }
        (prev, cur)
    }

    pub fn eval_qn(&self, n: usize, z: Complex64) -> Result<Complex64> {
        self.check(n)?;
        Ok(self
            .pair(n, z, (Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)))
            .1)
    }

    pub fn eval_qn_real(&self, n: usize, x: f64) -> f64 {
        let (mut prev, mut cur) = (0.0, 1.0);
        for k in 1..=n {
            let next = ((x - self.b[k - 1]) * cur - self.a_n(k - 1) * prev) / self.a[k - 1];
            prev = cur;
            cur = next;
        }
        cur
    }

    /// Second-kind polynomial with p_{−1} = −1, p_0 = 0.
    pub fn eval_pn(&self, n: usize, z: Complex64) -> Result<Complex64> {
        self.check(n)?;
        Ok(self
            .pair(n, z, (Complex64::new(-1.0, 0.0), Complex64::new(0.0, 0.0)))
            .1)
    }

    /// Leading coefficient k_n = 1/(a_1⋯a_n).
    pub fn leading_coefficient(&self, n: usize) -> f64 {
        1.0 / self.a[..n].iter().product::<f64>()
    }

    /// Zeros of q_n: eigenvalues of the n×n Jacobi truncation, ascending.
    pub fn qn_zeros(&self, n: usize) -> Result<Vec<f64>> {
        self.check(n)?;
        if n == 0 {
            return Ok(vec![]);
        }
        let mut j = DMatrix::zeros(n, n);
        for k in 0..n {
            j[(k, k)] = self.b[k];
            if k + 1 < n {
                j[(k, k + 1)] = self.a[k];
                j[(k + 1, k)] = self.a[k];
            }
        }
        let mut z: Vec<f64> = SymmetricEigen::new(j).eigenvalues.iter().copied().collect();
        z.sort_by(f64::total_cmp);
        Ok(z)
    }
}

/// s_k = ∫ x^k dμ for k ≤ K.
pub fn moments(measure: &ValidatedMeasure, k: usize) -> Vec<f64> {
    (0..=k)
        .map(|p| measure.integrate(|x| x.powi(p as i32)))
        .collect()
}

/// Stieltjes procedure with full reorthogonalization on the discretized measure.
pub fn stieltjes_coefficients(
    measure: &ValidatedMeasure,
    n: usize,
) -> Result<RecurrenceCoefficients> {
    let (x, w) = measure.discretize();
    if 2 * n > x.len() {
        return Err(Error::InsufficientNodes {
            requested: n,
            available: x.len(),
        });
    }
    let dot = |u: &[f64], v: &[f64]| -> f64 {
        u.iter().zip(v).zip(&w).map(|((a, b), c)| a * b * c).sum()
    };
    let mut basis: Vec<Vec<f64>> = vec![vec![1.0; x.len()]];
    let (mut a, mut b) = (Vec::with_capacity(n), Vec::with_capacity(n));
    for k in 0..n {
        let q = &basis[k];
        let xq: Vec<f64> = q.iter().zip(&x).map(|(q, x)| q * x).collect();
        let bk = dot(&xq, q);
        let mut v: Vec<f64> = xq
            .iter()
            .zip(q)
            .enumerate()
            .map(|(i, (xq, q))| {
                xq - bk * q
                    - if k > 0 {
                        a[k - 1] * basis[k - 1][i]
                    } else {
                        0.0
                    }
            })
            .collect();
        for _ in 0..2 {
            for u in &basis {
                let c = dot(&v, u);
                v.iter_mut().zip(u).for_each(|(vi, ui)| *vi -= c * ui);
            }
        }
        let ak = dot(&v, &v).sqrt();
        v.iter_mut().for_each(|vi| *vi /= ak);
        a.push(ak);
        b.push(bk);
        basis.push(v);
    }
    Ok(RecurrenceCoefficients { a, b })
}

/// Coefficients from the Cholesky factor of the Hankel moment matrix.
pub fn chebyshev_from_moments(s: &[f64], n: usize) -> Result<RecurrenceCoefficients> {
    let m = n + 1;
    if s.len() < 2 * n + 1 {
        return Err(Error::DegreeOutOfRange {
            requested: 2 * n,
            available: s.len().saturating_sub(1),
        });
    }
    let mut r = DMatrix::<f64>::zeros(m, m);
    for i in 0..m {
        let hij = |i: usize, j: usize| s.get(i + j).copied().unwrap_or(0.0);
        let pivot = hij(i, i) - (0..i).map(|k| r[(k, i)].powi(2)).sum::<f64>();
        if !(pivot > 0.0) {
            return Err(Error::HankelBreakdown { step: i, pivot });
        }
        r[(i, i)] = pivot.sqrt();
        for j in i + 1..m {
            r[(i, j)] =
                (hij(i, j) - (0..i).map(|k| r[(k, i)] * r[(k, j)]).sum::<f64>()) / r[(i, i)];
        }
    }
    let mut a = Vec::with_capacity(n);
    let mut b = Vec::with_capacity(n);
    for k in 0..n {
        let prev = if k == 0 {
            0.0
        } else {
            r[(k - 1, k)] / r[(k - 1, k - 1)]
        };
        b.push(r[(k, k + 1)] / r[(k, k)] - prev);
        a.push(r[(k + 1, k + 1)] / r[(k, k)]);
    }
    Ok(RecurrenceCoefficients { a, b })
}

/// q_n at the nodes of `measure.discretize()`.
///
/// Band nodes use the recurrence. Point masses outside the hull are recovered from
/// orthogonality against q_0, …, q_{m−1}, since forward evaluation there loses all digits.
pub fn qn_on_nodes(
    measure: &ValidatedMeasure,
    coeffs: &RecurrenceCoefficients,
    n: usize,
) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    coeffs.check(n)?;
    let (xs, ws) = measure.discretize();
    let m = measure.masses().len();
    let nb = xs.len() - m;
    let mut q: Vec<f64> = xs.iter().map(|&x| coeffs.eval_qn_real(n, x)).collect();
    if m == 0 || n < m {
        return Ok((xs, ws, q));
    }
    let mut lhs = DMatrix::zeros(m, m);
    let mut rhs = DVector::zeros(m);
    for k in 0..m {
        let band: f64 = (0..nb)
            .map(|i| ws[i] * coeffs.eval_qn_real(k, xs[i]) * q[i])
            .sum();
        rhs[k] = if k == n { 1.0 - band } else { -band };
        for s in 0..m {
            lhs[(k, s)] = ws[nb + s] * coeffs.eval_qn_real(k, xs[nb + s]);
        }
    }
    let sol = lhs.lu().solve(&rhs).ok_or(Error::SingularMassSystem)?;
    q[nb..].copy_from_slice(sol.as_slice());
    Ok((xs, ws, q))
}

/// G_{n+1}(z) = ∫ q_n(x)²/(z − x) dμ(x).
pub fn diagonal_green(
    measure: &ValidatedMeasure,
    coeffs: &RecurrenceCoefficients,
    n: usize,
    z: Complex64,
) -> Result<Complex64> {
    coeffs.check(n)?;
    measure.check_guard(z)?;
    let (xs, ws, q) = qn_on_nodes(measure, coeffs, n)?;
    Ok(xs
        .iter()
        .zip(&ws)
        .zip(&q)
        .map(|((&x, &w), &v)| w * v * v / (z - x))
        .sum())
}

/// r_n(z) = ∫ q_n(x)/(z − x) dμ(x), evaluated as G_{n+1}/q_n away from zeros of q_n.
pub fn eval_rn(
    measure: &ValidatedMeasure,
    coeffs: &RecurrenceCoefficients,
    n: usize,
    z: Complex64,
) -> Result<Complex64> {
    let q = coeffs.eval_qn(n, z)?;
    let g = diagonal_green(measure, coeffs, n, z)?;
    if q.norm() > 1e-8 {
        Ok(g / q)
    } else {
        let (xs, ws, q) = qn_on_nodes(measure, coeffs, n)?;
        Ok(xs
            .iter()
            .zip(&ws)
            .zip(&q)
            .map(|((&x, &w), &v)| w * v / (z - x))
            .sum())
    }
}

/// Padé approximant p_n/q_n of μ̂ at z.
pub fn pade_value(coeffs: &RecurrenceCoefficients, n: usize, z: Complex64) -> Result<Complex64> {
    Ok(coeffs.eval_pn(n, z)? / coeffs.eval_qn(n, z)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpuriousPole {
    pub location: f64,
    pub zero: f64,
    pub distance: f64,
}

/// For each mass, the zero of q_n outside the hull of E on the side of the mass that is nearest to it.
pub fn spurious_poles(
    measure: &ValidatedMeasure,
    coeffs: &RecurrenceCoefficients,
    n: usize,
) -> Vec<Result<SpuriousPole>> {
    let zeros = match coeffs.qn_zeros(n) {
        Ok(z) => z,
        Err(e) => return measure.masses().iter().map(|_| Err(e.clone())).collect(),
    };
    let (lo, hi) = measure.hull();
    measure
        .masses()
        .iter()
        .map(|m| {
            let zeta = m.location;
            zeros
                .iter()
                .copied()
                .filter(|&z| if zeta > hi { z > hi } else { z < lo })
                .min_by(|x, y| (x - zeta).abs().total_cmp(&(y - zeta).abs()))
                .map(|z| SpuriousPole {
                    location: zeta,
                    zero: z,
                    distance: (z - zeta).abs(),
                })
                .ok_or(Error::NoZeroNearMass { location: zeta, n })
        })
        .collect()
}
