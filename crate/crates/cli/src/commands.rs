//! Command dispatch.

use bandtrace_core::inversion::{calibrate_flow, divisor_flow, FlowSettings};
use bandtrace_core::recurrence::{pade_value, spurious_poles, stieltjes_coefficients};
use bandtrace_core::validator::{verify_theorem2, DecayVerdict};
use bandtrace_core::{Pipeline, Surface};
use clap::ValueEnum;
use num_complex::Complex64;

use crate::config::RunConfig;
use crate::error::Result;
use crate::output::{format_number, Artifacts, Cell, Table};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Command {
    /// Recurrence coefficients a_n, b_n.
    Coeffs,
    /// Branch points, harmonic measures, periods, capacity, Green critical points.
    Surface,
    /// Divisor projections and sheets over the configured range.
    Divisor,
    /// Trajectory of the divisor flow started from the inversion divisor at n = g.
    Flow,
    /// Trace formulas, diagonal Green function and optional ψ check.
    Verify,
    /// Zeros, spurious poles and Padé errors at sample points.
    Pade,
}

pub fn run_command(config: &RunConfig, command: Command) -> Result<Artifacts> {
    let mut out = match command {
        Command::Coeffs => coeffs(config),
        Command::Surface => surface(config),
        Command::Divisor => divisor(config),
        Command::Flow => flow(config),
        Command::Verify => verify(config),
        Command::Pade => pade(config),
    }?;
    let mut header = vec![
        format!(
            "command: {}",
            command
                .to_possible_value()
                .expect("no skipped variants")
                .get_name()
        ),
        format!("bands: {:?}", config.bands),
        format!("masses: {}", config.masses.len()),
        format!(
            "nodes per band: {}, N max: {}, mode: {:?}",
            config.solver.nodes, config.solver.n_max, config.solver.mode
        ),
    ];
    header.append(&mut out.report);
    out.report = header;
    Ok(out)
}

fn pipeline(config: &RunConfig, n_min: usize, n_max: usize) -> Result<Pipeline> {
    let m = config.measure()?;
    Ok(Pipeline::with_settings(
        &m,
        n_min,
        n_max,
        config.solver.mode,
        &config.solver.newton(),
    )?)
}

fn coeffs(config: &RunConfig) -> Result<Artifacts> {
    let m = config.measure()?.normalize();
    let n_max = config.solver.n_max;
    let c = stieltjes_coefficients(&m, n_max)?;
    let mut t = Table::new("coeffs", &["n", "a_n", "b_n"]);
    for n in 1..=n_max {
        t.push(vec![n.into(), c.a_n(n).into(), c.b_n(n).into()]);
    }
    let report = vec![format!(
        "coefficients: n = 1..{n_max} of the normalized measure"
    )];
    let summary = vec![format!(
        "a_{n_max} = {}, b_{n_max} = {}",
        format_number(c.a_n(n_max)),
        format_number(c.b_n(n_max))
    )];
    Ok(Artifacts {
        tables: vec![t],
        report,
        summary,
        failure: None,
    })
}

fn surface(config: &RunConfig) -> Result<Artifacts> {
    let m = config.measure()?;
    let s = Surface::new(m.root().e())?;
    let d = s.data();
    let mut t = Table::new("surface", &["quantity", "i", "j", "value"]);
    let row = |q: &str, i: usize, j: usize, v: f64| vec![q.into(), i.into(), j.into(), v.into()];
    for (i, &e) in d.branch_points.iter().enumerate() {
        t.push(row("e", i + 1, 0, e));
    }
    t.push(row("capacity", 0, 0, d.capacity));
    for (j, &w) in d.harmonic_measures.iter().enumerate() {
        t.push(row("omega_inf", j + 1, 0, w));
    }
    for (j, &y) in d.green_roots.iter().enumerate() {
        t.push(row("y", j + 1, 0, y));
    }
    for (i, r) in d.period_imag.iter().enumerate() {
        for (j, &v) in r.iter().enumerate() {
            t.push(row("im_B", i + 1, j + 1, v));
        }
    }
    for (k, r) in d.differentials.iter().enumerate() {
        for (j, &v) in r.iter().enumerate() {
            t.push(row("p_coeff", k + 1, j, v));
        }
    }
    let report = vec![
        format!("genus: {}", d.genus),
        format!("capacity: {}", format_number(d.capacity)),
        "B = i·im_B; p_coeff(k, j) is the x^j coefficient of the k-th normalized differential numerator".to_string(),
    ];
    let summary = vec![format!(
        "genus {}, capacity {}",
        d.genus,
        format_number(d.capacity)
    )];
    Ok(Artifacts {
        tables: vec![t],
        report,
        summary,
        failure: None,
    })
}

fn divisor(config: &RunConfig) -> Result<Artifacts> {
    let (from, to) = (config.range.from, config.range_to());
    let p = pipeline(config, from, to)?;
    let mut t = Table::new(
        "divisor",
        &["n", "j", "z_j", "epsilon_j", "inversion_residual"],
    );
    let mut worst = 0.0f64;
    for n in from..=to {
        let s = &p.solutions[n - p.n_min];
        worst = worst.max(s.residual);
        for (j, q) in s.divisor.points.iter().enumerate() {
            t.push(vec![
                n.into(),
                (j + 1).into(),
                q.z.into(),
                (q.sheet.sign() as i8).into(),
                s.residual.into(),
            ]);
        }
    }
    let report = vec![
        format!("genus: {}, degrees {from}..{to}", p.surface.genus()),
        format!("max inversion residual: {}", format_number(worst)),
    ];
    let summary = vec![format!(
        "{} divisor rows, max inversion residual {:.1e}",
        t.rows.len(),
        worst
    )];
    Ok(Artifacts {
        tables: vec![t],
        report,
        summary,
        failure: None,
    })
}

fn flow(config: &RunConfig) -> Result<Artifacts> {
    let f = &config.flow;
    let m = config.measure()?;
    let g = m.genus();
    let p = pipeline(config, g, g + f.steps.max(1))?;
    let d0 = p.divisor(g).expect("pipeline starts at g");
    let settings = FlowSettings {
        time_scale: f.time_scale,
        ..FlowSettings::default()
    };
    let traj = divisor_flow(&p.surface, d0, f.steps, f.dt, &settings)?;
    let cal = calibrate_flow(&p.surface, &p.targets, &p.solutions, f.steps)?;
    let mut t = Table::new("flow", &["t", "j", "angle", "z_j", "epsilon_j"]);
    for s in &traj.samples {
        for j in 0..s.angles.len() {
            t.push(vec![
                s.t.into(),
                (j + 1).into(),
                s.angles[j].into(),
                s.projections[j].into(),
                s.sheets[j].into(),
            ]);
        }
    }
    let mut ev = Table::new("flow_events", &["t", "gap", "edge"]);
    for e in &traj.events {
        ev.push(vec![e.t.into(), (e.gap + 1).into(), e.edge.into()]);
    }
    let verdict = if cal.flagged {
        "flagged: factor differs from 1"
    } else {
        "within 1e-3 of 1"
    };
    let report = vec![
        format!(
            "start: inversion divisor at n = {g}; {} steps of {}; time scale {}",
            f.steps, f.dt, f.time_scale
        ),
        format!(
            "calibration factor: {} ({verdict})",
            format_number(cal.factor)
        ),
        format!(
            "calibration fit residual: {}",
            format_number(cal.fit_residual)
        ),
        format!("edge crossings: {}", traj.events.len()),
    ];
    let summary = vec![format!(
        "calibration factor {:.6} ({verdict}), {} edge crossings",
        cal.factor,
        traj.events.len()
    )];
    Ok(Artifacts {
        tables: vec![t, ev],
        report,
        summary,
        failure: None,
    })
}

fn describe(name: &str, v: &DecayVerdict) -> String {
    let verdict = if v.pass { "PASS" } else { "FAIL" };
    match &v.fit {
        Some(f) => format!(
            "{name}: slope {:.4} R² {:.4} over {} points, last {:.3e}: {verdict}",
            f.slope, f.r_squared, f.points, v.last
        ),
        None => format!("{name}: at noise floor, last {:.3e}: {verdict}", v.last),
    }
}

fn verify(config: &RunConfig) -> Result<Artifacts> {
    let (from, to) = (config.range.from, config.range_to());
    let p = pipeline(config, from - 1, to)?;
    let ns: Vec<usize> = (from..=to).collect();
    let r = verify_theorem2(&p, &ns, config.verify.prop1_point)?;
    let mut t = Table::new(
        "verify",
        &[
            "n",
            "a_n",
            "b_n",
            "b_pred",
            "a_pred",
            "b_residual",
            "a_residual",
            "thm1_residual",
            "prop1_error",
            "inversion_residual",
        ],
    );
    for x in &r.records {
        t.push(vec![
            x.n.into(),
            x.a_actual.into(),
            x.b_actual.into(),
            x.b_predicted.into(),
            x.a_predicted.into(),
            (x.b_actual - x.b_predicted).abs().into(),
            (x.a_actual / x.a_predicted - 1.0).abs().into(),
            x.thm1_residual.into(),
            x.prop1_error.into(),
            x.inversion_residual.into(),
        ]);
    }
    let mut summary = vec![
        describe("b_n", &r.b_fit),
        describe("a_n", &r.a_fit),
        describe("q_n r_n", &r.thm1_fit),
    ];
    if let Some(v) = &r.prop1_fit {
        summary.push(describe("psi", v));
    }
    let mut report = vec![
        format!("degrees {from}..{to}"),
        format!("indexing: {}", r.indexing),
    ];
    report.extend(summary.iter().cloned());
    if !r.blowups.is_empty() {
        report.push(format!("residual jumps at n = {:?}", r.blowups));
    }
    let failure = (!r.pass()).then(|| {
        summary
            .iter()
            .filter(|l| l.ends_with("FAIL"))
            .cloned()
            .collect::<Vec<_>>()
            .join("; ")
    });
    summary.push(format!(
        "verdict: {}",
        if failure.is_none() { "PASS" } else { "FAIL" }
    ));
    Ok(Artifacts {
        tables: vec![t],
        report,
        summary,
        failure,
    })
}

fn pade(config: &RunConfig) -> Result<Artifacts> {
    let m = config.measure()?.normalize();
    let (from, to) = (config.range.from, config.range_to());
    let c = stieltjes_coefficients(&m, to)?;
    let points: Vec<Complex64> = if config.pade.points.is_empty() {
        let (lo, hi) = m.hull();
        let (mid, half) = (0.5 * (lo + hi), 0.5 * (hi - lo));
        vec![Complex64::new(mid, half), Complex64::new(mid, 2.0 * half)]
    } else {
        config
            .pade
            .points
            .iter()
            .map(|p| Complex64::new(p[0], p[1]))
            .collect()
    };
    let exact = points
        .iter()
        .map(|&z| m.cauchy_transform(z))
        .collect::<bandtrace_core::Result<Vec<_>>>()?;
    let mut zeros = Table::new("zeros", &["n", "k", "zero"]);
    let mut poles = Table::new("spurious_poles", &["n", "mass", "zero", "distance"]);
    let mut errors = Table::new("pade", &["n", "re_z", "im_z", "error"]);
    let mut worst_last = 0.0f64;
    for n in from..=to {
        for (k, z) in c.qn_zeros(n)?.into_iter().enumerate() {
            zeros.push(vec![n.into(), (k + 1).into(), z.into()]);
        }
        for (mass, sp) in m.masses().iter().zip(spurious_poles(&m, &c, n)) {
            match sp {
                Ok(s) => poles.push(vec![
                    n.into(),
                    mass.location.into(),
                    s.zero.into(),
                    s.distance.into(),
                ]),
                Err(_) => poles.push(vec![
                    n.into(),
                    mass.location.into(),
                    Cell::Empty,
                    Cell::Empty,
                ]),
            }
        }
        for (z, f) in points.iter().zip(&exact) {
            let e = (pade_value(&c, n, *z)? - f).norm();
            if n == to {
                worst_last = worst_last.max(e);
            }
            errors.push(vec![n.into(), z.re.into(), z.im.into(), e.into()]);
        }
    }
    let report = vec![
        format!("degrees {from}..{to}, {} sample points", points.len()),
        format!("max Padé error at n = {to}: {}", format_number(worst_last)),
    ];
    let summary = vec![format!("max Padé error at n = {to}: {worst_last:.3e}")];
    Ok(Artifacts {
        tables: vec![zeros, poles, errors],
        report,
        summary,
        failure: None,
    })
}
