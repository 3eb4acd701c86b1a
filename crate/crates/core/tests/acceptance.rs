use bandtrace_core::inversion::{angle_law_check, calibrate_flow, divisor_flow, FlowSettings};
use bandtrace_core::recurrence::{spurious_poles, stieltjes_coefficients};
use bandtrace_core::validator::{
    decay_verdict, gram_error, laurent_b_error, leading_ratio_error, log_linear_fit,
    normalization_check, predict_b, psi_identity_error, verify_theorem2, DecayVerdict,
};
use bandtrace_core::*;
use nalgebra::{DMatrix, DVector};
use std::process::ExitCode;

const SYM: [f64; 4] = [-1.0, -0.5, 0.5, 1.0];
const ASYM: [f64; 4] = [-1.0, -0.4, 0.0, 1.0];

type Check = fn() -> Result<Line>;

struct Line {
    pass: bool,
    detail: String,
}

fn line(pass: bool, detail: String) -> Result<Line> {
    Ok(Line { pass, detail })
}

fn measure(e: &[f64], masses: Vec<PointMass>) -> ValidatedMeasure {
    MultiBandMeasure::from_edges(e, Weight::Constant(1.0), masses)
        .validate()
        .unwrap()
}

fn verdict(v: &DecayVerdict) -> String {
    match &v.fit {
        Some(f) => format!(
            "slope {:.3} R² {:.3} ({} pts)",
            f.slope, f.r_squared, f.points
        ),
        None => format!("at noise floor, last {:.1e}", v.last),
    }
}

/// Robin constant of piecewise-constant charges on cells graded toward the band edges.
fn energy_capacity(bands: &[(f64, f64)], per_band: usize) -> f64 {
    let mut cells = Vec::new();
    for &(lo, hi) in bands {
        let x = |k: usize| {
            0.5 * (lo + hi)
                - 0.5 * (hi - lo) * (k as f64 * std::f64::consts::PI / per_band as f64).cos()
        };
        cells.extend((0..per_band).map(|k| (x(k), x(k + 1))));
    }
    let n = cells.len();
    let mid: Vec<f64> = cells.iter().map(|c| 0.5 * (c.0 + c.1)).collect();
    let k = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            1.5 - (cells[i].1 - cells[i].0).ln()
        } else {
            -(mid[i] - mid[j]).abs().ln()
        }
    });
    let w = k.lu().solve(&DVector::from_element(n, 1.0)).unwrap();
    (-1.0 / w.sum()).exp()
}

fn classical() -> Result<Line> {
    let p = Pipeline::new(&measure(&[-1.0, 1.0], vec![]), 0, 40, Mode::Asymptotic)?;
    let c = &p.coeffs;
    let mut err = (c.a_n(1) - 0.5f64.sqrt()).abs().max(c.b_n(1).abs());
    for n in 2..=40 {
        err = err.max((c.a_n(n) - 0.5).abs()).max(c.b_n(n).abs());
    }
    let cap = (p.surface.capacity() - 0.5).abs();
    let pb_zero = (1..=40).all(|n| predict_b(&p.surface, p.divisor(n - 1).unwrap()) == 0.0);
    line(
        err < 1e-10 && cap < 1e-10 && pb_zero,
        format!("max coefficient error {err:.1e}, capacity error {cap:.1e}, predict_b exactly zero: {pb_zero}"),
    )
}

fn surface_sanity() -> Result<Line> {
    let s = Surface::new(&SYM)?;
    let om = s.harmonic_measures();
    let om_err = (om[0] - 0.5).abs().max((om[1] - 0.5).abs());
    let y = s.green_roots()[0].abs();
    let s2 = Surface::new(&[-2.0, -1.2, -0.9, 0.1, 0.5, 1.3])?;
    let t = s2.period_matrix();
    let sym = (t[(0, 1)] - t[(1, 0)]).abs();
    let fine = energy_capacity(&[(-1.0, -0.5), (0.5, 1.0)], 1000);
    let coarse = energy_capacity(&[(-1.0, -0.5), (0.5, 1.0)], 500);
    let oracle = 2.0 * fine - coarse;
    let cap = (s.capacity() - oracle).abs();
    line(
        om_err < 1e-10 && y < 1e-10 && sym < 1e-9 && cap < 1e-4,
        format!("ω error {om_err:.1e}, y_1 {y:.1e}, B asymmetry {sym:.1e}, capacity vs energy oracle {cap:.1e}"),
    )
}

fn trace_fits(e: &[f64], quasi_periodic: bool) -> Result<Line> {
    let p = Pipeline::new(&measure(e, vec![]), 4, 41, Mode::Asymptotic)?;
    let ns: Vec<usize> = (8..=40).collect();
    let r = verify_theorem2(&p, &ns, None)?;
    let late_b = r
        .records
        .iter()
        .filter(|x| x.n >= 20)
        .map(|x| (x.b_actual - x.b_predicted).abs())
        .fold(0.0, f64::max);
    let late_a = r
        .records
        .iter()
        .filter(|x| x.n >= 20)
        .map(|x| (x.a_actual / x.a_predicted - 1.0).abs())
        .fold(0.0, f64::max);
    let bounded = quasi_periodic || (late_b < 1e-6 && late_a < 1e-6);
    let mut pass = bounded && r.b_fit.pass && r.a_fit.pass;
    let mut detail = format!(
        "b: max late {late_b:.1e}, {}; a: max late {late_a:.1e}, {}",
        verdict(&r.b_fit),
        verdict(&r.a_fit)
    );
    if quasi_periodic {
        let bs: Vec<f64> = (20..=40).map(|n| p.coeffs.b_n(n)).collect();
        let gap = bs
            .iter()
            .flat_map(|x| bs.iter().map(move |y| (x - y).abs()))
            .fold(0.0, f64::max);
        pass &= gap > 1e-3;
        detail.push_str(&format!("; b_n spread over 20..40 {gap:.3e}"));
    }
    line(pass, detail)
}

fn theorem1() -> Result<Line> {
    let mut pass = true;
    let mut detail = Vec::new();
    for (name, e) in [("symmetric", SYM), ("asymmetric", ASYM)] {
        let p = Pipeline::new(&measure(&e, vec![]), 4, 41, Mode::Asymptotic)?;
        let r = verify_theorem2(&p, &(8..=40).collect::<Vec<_>>(), None)?;
        let last = r.records.last().unwrap().thm1_residual;
        pass &= r.thm1_fit.pass && last < 1e-5;
        let parity: Vec<String> = [0, 1]
            .iter()
            .filter_map(|&par| {
                let (ns, rs): (Vec<usize>, Vec<f64>) = r
                    .records
                    .iter()
                    .filter(|x| x.n % 2 == par)
                    .map(|x| (x.n, x.thm1_residual))
                    .unzip();
                log_linear_fit(&ns, &rs)
                    .map(|f| format!("slope {:.2} R² {:.3}", f.slope, f.r_squared))
            })
            .collect();
        let parity = if parity.len() == 2 {
            format!(" [by parity, informational: {}]", parity.join(" / "))
        } else {
            String::new()
        };
        detail.push(format!(
            "{name}: {}, n=40 residual {last:.1e}{parity}",
            verdict(&r.thm1_fit)
        ));
    }
    line(pass, detail.join("; "))
}

fn point_mass() -> Result<Line> {
    let m = measure(
        &[-1.0, 1.0],
        vec![PointMass {
            location: 1.5,
            weight: 0.5,
        }],
    )
    .normalize();
    let c = stieltjes_coefficients(&m, 42)?;
    let mut one_zero = true;
    for n in 5..=40 {
        let count = c
            .qn_zeros(n)?
            .iter()
            .filter(|&&z| z > 1.0 && z < 2.0)
            .count();
        one_zero &= count == 1;
    }
    let ns: Vec<usize> = (5..=40).collect();
    let dist: Vec<f64> = ns
        .iter()
        .map(|&n| {
            spurious_poles(&m, &c, n)[0]
                .as_ref()
                .map(|p| p.distance)
                .unwrap_or(f64::NAN)
        })
        .collect();
    let v = decay_verdict(&ns, &dist);
    let slope_ok = v.fit.as_ref().is_some_and(|f| f.slope < -0.05);
    let (da, db) = ((c.a_n(40) - 0.5).abs(), c.b_n(40).abs());
    line(
        one_zero && slope_ok && da < 1e-4 && db < 1e-4,
        format!("one zero in (1,2) for n=5..40: {one_zero}; |ζ_n − ζ| {}; |a_40 − 1/2| {da:.1e}, |b_40| {db:.1e}", verdict(&v)),
    )
}

fn mass_pipeline() -> Result<Line> {
    let zeta = ASYM[3] + 1.0;
    let p = Pipeline::new(
        &measure(
            &ASYM,
            vec![PointMass {
                location: zeta,
                weight: 0.1,
            }],
        ),
        4,
        41,
        Mode::Asymptotic,
    )?;
    let r = verify_theorem2(&p, &(8..=40).collect::<Vec<_>>(), None)?;
    let inv = p.solutions.iter().map(|s| s.residual).fold(0.0, f64::max);
    let one_per_gap = p.solutions.iter().all(|s| {
        s.divisor.len() == 1 && s.divisor.points[0].z >= ASYM[1] && s.divisor.points[0].z <= ASYM[2]
    });
    line(
        r.pass() && inv < 1e-10 && one_per_gap,
        format!(
            "b {}; a {}; q_n r_n {}; max inversion residual {inv:.1e}; one point per gap: {one_per_gap}",
            verdict(&r.b_fit),
            verdict(&r.a_fit),
            verdict(&r.thm1_fit)
        ),
    )
}

fn flow() -> Result<Line> {
    let p = Pipeline::new(&measure(&ASYM, vec![]), 1, 11, Mode::Asymptotic)?;
    let cal = calibrate_flow(&p.surface, &p.targets, &p.solutions, 5)?;
    let settings = FlowSettings {
        time_scale: cal.factor,
        ..Default::default()
    };
    let traj = divisor_flow(&p.surface, &p.solutions[0].divisor, 10, 1.0, &settings)?;
    let err = (1..=10)
        .map(|k| {
            traj.samples[k]
                .projections
                .iter()
                .zip(p.solutions[k].divisor.projections())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max)
        })
        .fold(0.0, f64::max);
    let flag = if cal.flagged {
        " (flagged: factor differs from 1)"
    } else {
        ""
    };
    line(
        err < 1e-5,
        format!(
            "max projection error {err:.1e} over 10 offsets; calibration factor {:.6}{flag}",
            cal.factor
        ),
    )
}

fn identities() -> Result<Line> {
    let p = Pipeline::new(
        &measure(
            &ASYM,
            vec![PointMass {
                location: 2.0,
                weight: 0.1,
            }],
        ),
        4,
        41,
        Mode::ExactN,
    )?;
    let gram = gram_error(&p.measure, &p.coeffs, 40).expect("gram");
    let e = p.surface.root().right();
    let id = [0.7, 1.6, 3.1]
        .iter()
        .map(|dz| psi_identity_error(&p, 30, e + dz))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    let norm = (normalization_check(&p, 30)?.value - 2.0).abs();
    let d1 = (1..40)
        .map(|n| laurent_b_error(&p.measure, &p.coeffs, n).expect("laurent"))
        .fold(0.0, f64::max);
    let hull = p.measure.hull();
    let lead = (1..=40)
        .map(|n| leading_ratio_error(&p.coeffs, n, hull))
        .fold(0.0, f64::max);
    line(
        gram < 1e-10 && id < 1e-8 && norm < 1e-5 && d1 < 1e-10 && lead < 1e-9,
        format!("Gram {gram:.1e}; ψ₁ψ₂ identity {id:.1e}; normalization at n=30 off by {norm:.1e}; d_1 {d1:.1e}; k ratio {lead:.1e}"),
    )
}

fn angle_law() -> Result<Line> {
    let mut pass = true;
    let mut detail = Vec::new();
    let cases = [
        ("symmetric", measure(&SYM, vec![])),
        (
            "with mass",
            measure(
                &ASYM,
                vec![PointMass {
                    location: 2.0,
                    weight: 0.1,
                }],
            ),
        ),
    ];
    for (name, m) in cases {
        let p = Pipeline::new(&m, 5, 40, Mode::Asymptotic)?;
        let r = angle_law_check(&p.surface, &p.divisors());
        pass &= r.max_deviation < 1e-6;
        detail.push(format!("{name}: max deviation {:.1e}", r.max_deviation));
    }
    line(pass, detail.join("; "))
}

fn main() -> ExitCode {
    let criteria: [(&str, Check); 10] = [
        ("classical interval", classical),
        ("surface sanity", surface_sanity),
        ("trace formulas, symmetric two bands", || {
            trace_fits(&SYM, false)
        }),
        ("trace formulas, asymmetric two bands", || {
            trace_fits(&ASYM, true)
        }),
        ("diagonal Green function", theorem1),
        ("point mass on one interval", point_mass),
        ("two bands with a mass", mass_pipeline),
        ("divisor flow", flow),
        ("identities", identities),
        ("angle law", angle_law),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let l = f().unwrap_or_else(|e| Line {
            pass: false,
            detail: format!("error: {e}"),
        });
        if !l.pass {
            failed += 1;
        }
        println!(
            "[{:>2}] {} {name}: {}",
            i + 1,
            if l.pass { "PASS" } else { "FAIL" },
            l.detail
        );
    }
    println!(
        "{} of {} criteria pass",
        criteria.len() - failed,
        criteria.len()
    );
    let strict = std::env::var("ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    if failed == 0 || !strict {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
