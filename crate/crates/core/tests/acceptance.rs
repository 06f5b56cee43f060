//! Acceptance suite. Runs without the libtest harness so every criterion
//! prints its own PASS/FAIL line; the process exits nonzero if any fails.

use prandtl_mhd::assembler::remainder_norms;
use prandtl_mhd::bl0::{solve_bl0, LayerParams};
use prandtl_mhd::diagnostics::{
    c_delta, check_symmetrizer, domination_constants, inverse_transform, transform, CoefficientFields, Coefficients, Fields4,
};
use prandtl_mhd::fields::{Grid, Stretching};
use prandtl_mhd::inner0::{BoundaryTrace, Preset, WaveSpec};
use prandtl_mhd::study::{
    assemble_and_check, build_stages, fit_rate, run_study, viscous_params, CaseResult, ConvergenceReport, PresetKind,
    StudyConfig,
};
use prandtl_mhd::viscous::{budget_order, energy_budget, solve_viscous_mhd, ViscousParams, SCHEME_ORDER};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::function::erf::erf;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn max_abs<'a>(it: impl IntoIterator<Item = &'a Vec<f64>>) -> f64 {
    it.into_iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()))
}

fn times(t_end: f64, n: usize) -> Vec<f64> {
    (0..=n).map(|k| t_end * k as f64 / n as f64).collect()
}

fn equilibrium() -> prandtl_mhd::Result<Outcome> {
    let cfg = StudyConfig { preset: PresetKind::UniformField, h_base: 1.0, u_amp: 0.0, h_amp: 0.0, ..StudyConfig::default() };
    let (parts, bl0) = build_stages(&cfg)?;
    let init = cfg.preset_value().initial_state(&parts.inner0.grid);
    let d_inner0 = parts.inner0.max_drift(&init);
    let one_minus = |f: &[Vec<f64>]| f.iter().flatten().fold(0.0f64, |m, v| m.max((v - 1.0).abs()));
    let d_bl0 = max_abs(&bl0.up).max(max_abs(&bl0.vp)).max(max_abs(&bl0.gp)).max(one_minus(&bl0.hp));
    let d_inner1 = parts
        .inner1
        .states
        .iter()
        .map(|s| max_abs([&s.u.values, &s.v.values, &s.h.values, &s.g.values]))
        .fold(0.0, f64::max);
    let p1 = &parts.profile1;
    let d_bl1 = max_abs(p1.ub.iter().chain(&p1.vb).chain(&p1.hb).chain(&p1.gb));
    let params = viscous_params(&cfg, 1e-2)?;
    let visc = solve_viscous_mhd(&init, &params, &parts.inner0.grid)?;
    let d_visc = visc.max_drift(&init);
    let mut r_max = 0.0f64;
    for &eps in &cfg.eps_list {
        let (_, r) = assemble_and_check(&parts, &cfg, eps)?;
        for i in 0..4 {
            r_max = r.l2(i).into_iter().fold(r_max, f64::max);
        }
    }
    let drift = [d_inner0, d_bl0, d_inner1, d_bl1, d_visc];
    let pass = drift.iter().all(|d| *d <= 1e-10) && r_max <= 1e-8;
    Ok(outcome(
        pass,
        format!(
            "drift inner0 {:.1e} bl0 {:.1e} inner1 {:.1e} bl1 {:.1e} viscous {:.1e} (<= 1e-10), max |R_i|_L2 {r_max:.1e} (<= 1e-8)",
            drift[0], drift[1], drift[2], drift[3], drift[4]
        ),
    ))
}

fn erf_error(neta: usize, dt: f64) -> prandtl_mhd::Result<f64> {
    let g = Grid::layer(8, neta, 30.0)?;
    let tr = BoundaryTrace::uniform(&times(0.5, 10), 8, 1.0, 1.0);
    let st = solve_bl0(&tr, 0.5, 0.5, &g, dt, LayerParams::default())?;
    let t: f64 = 0.5;
    let last = st.up.last().unwrap();
    Ok((0..neta).map(|j| (last[8 * j] - erf(g.y[j] / (2.0 * t.sqrt()))).abs()).fold(0.0, f64::max))
}

fn similarity() -> prandtl_mhd::Result<Outcome> {
    let e1 = erf_error(256, 0.005)?;
    let e2 = erf_error(512, 0.0025)?;
    let rate = (e1 / e2).log2();
    Ok(outcome(
        e1 <= 1e-3 && rate >= 1.7,
        format!("Linf {e1:.3e} at n_eta=256 (<= 1e-3), {e2:.3e} at 512, observed order {rate:.2} (>= 1.7)"),
    ))
}

fn positivity() -> prandtl_mhd::Result<Outcome> {
    let cfg = StudyConfig { preset: PresetKind::StationaryShear, ..StudyConfig::default() };
    let (_, bl0) = build_stages(&cfg)?;
    let bound = 0.5 * bl0.delta0;
    let m = bl0.hp_min.iter().cloned().fold(f64::INFINITY, f64::min);
    let series: Vec<String> = bl0.times.iter().zip(&bl0.hp_min).map(|(t, h)| format!("{t:.2}:{h:.4}")).collect();
    println!("  min h^p series (time:value) {}", series.join(" "));
    Ok(outcome(m >= bound, format!("min h^p {m:.6} over [0, {}] (>= delta0/2 = {bound:.6})", bl0.times.last().unwrap())))
}

fn remainder_order(report: &ConvergenceReport, cases: &[CaseResult]) -> prandtl_mhd::Result<Outcome> {
    let want = [1e-2, 10f64.powf(-2.5), 1e-3];
    let rows: Vec<_> = report.rows.iter().filter(|r| want.iter().any(|e| (r.eps / e - 1.0).abs() < 1e-9)).collect();
    if rows.len() != want.len() {
        return Ok(outcome(false, format!("only {} of the three eps values completed", rows.len())));
    }
    let eps: Vec<f64> = rows.iter().map(|r| r.eps).collect();
    let mut slopes = [0.0; 4];
    for (i, s) in slopes.iter_mut().enumerate() {
        let norms: Vec<f64> = rows.iter().map(|r| r.remainder_l2[i]).collect();
        *s = fit_rate(&eps, &norms)?.slope;
    }
    println!("  |alpha| <= 2 table: eps, i, alpha_t, alpha_x, sup_t L2");
    for c in cases.iter().filter(|c| eps.contains(&c.eps)) {
        let rows = remainder_norms(&c.remainders, 2);
        for i in 1..=4 {
            for at in 0..=2 {
                for ax in 0..=(2 - at) {
                    let sup = rows
                        .iter()
                        .filter(|r| r.i == i && r.alpha_t == at && r.alpha_x == ax)
                        .map(|r| r.l2_norm)
                        .fold(f64::NAN, f64::max);
                    println!("  {:.3e}, {i}, {at}, {ax}, {sup:.4e}", c.eps);
                }
            }
        }
    }
    Ok(outcome(
        slopes.iter().all(|s| *s >= 0.9),
        format!("slopes R1 {:.3} R2 {:.3} R3 {:.3} R4 {:.3} (>= 0.9)", slopes[0], slopes[1], slopes[2], slopes[3]),
    ))
}

fn convergence(report: &ConvergenceReport) -> Outcome {
    for r in &report.rows {
        println!("  eps {:.3e} Linf {:.4e} L2 {:.4e}", r.eps, r.linf_error, r.l2_error);
    }
    match &report.fit {
        Some(f) if report.failures.is_empty() && report.rows.len() == 4 => outcome(
            report.monotone() && f.slope >= 0.30,
            format!("monotone {}, slope {:.3} +/- {:.3} (>= 0.30)", report.monotone(), f.slope, f.ci95),
        ),
        _ => outcome(false, format!("sweep incomplete, failures {:?}", report.failures)),
    }
}

fn energy(cfg: &StudyConfig, cases: &[CaseResult]) -> prandtl_mhd::Result<Outcome> {
    let mut worst = 0.0f64;
    for c in cases {
        let b = energy_budget(&c.viscous, &viscous_params(cfg, c.eps)?);
        println!("  eps {:.3e} budget max relative residual {:.3e}", c.eps, b.max_relative);
        worst = worst.max(b.max_relative);
    }
    let g = Grid::physical(16, 128, 8.0, Stretching::Tanh { beta: 3.0 })?;
    let init = Preset::NumericalInner(WaveSpec { u_amp: 0.1, h_base: 1.0, h_amp: 0.1 }).initial_state(&g);
    let budget = |dt: f64| -> prandtl_mhd::Result<_> {
        let p = ViscousParams::new(1e-2, 1.0, 1.0, 0.2, dt)?.with_cadence((0.02 / dt).round() as usize);
        Ok(energy_budget(&solve_viscous_mhd(&init, &p, &g)?, &p))
    };
    let (a, b, c) = (budget(0.004)?, budget(0.002)?, budget(0.001)?);
    let small = [&a, &b, &c].iter().map(|x| x.max_relative).fold(0.0, f64::max);
    let order = budget_order(&a, &b, &c)?;
    Ok(outcome(
        worst.max(small) <= 1e-4 && (order - SCHEME_ORDER).abs() <= 0.3,
        format!(
            "max relative residual {:.3e} on the sweep, {small:.3e} on the refinement runs (<= 1e-4), residual order {order:.2} (expected {SCHEME_ORDER})",
            worst
        ),
    ))
}

fn symmetrizer(cfg: &StudyConfig, cases: &[CaseResult]) -> prandtl_mhd::Result<Outcome> {
    let mut pass = true;
    let mut min_eig = f64::INFINITY;
    let mut checked = 0;
    for c in cases {
        let d = c.diagnostics.as_ref().expect("diagnostics enabled");
        let s = &d.symmetrizer;
        let cd = s.c_delta;
        for r in s.rows.iter().filter(|r| r.smallness_holds) {
            checked += 1;
            min_eig = min_eig.min(r.min_sb_eig);
            pass &= r.min_sb_eig >= cfg.delta && r.c_delta_margin >= 0.0 && cd > 0.0;
        }
    }
    let g = Grid::physical(16, 64, 8.0, Stretching::Tanh { beta: 2.0 })?;
    let zero = CoefficientFields { grid: g.clone(), eps: 1e-2, times: vec![0.0], ap: vec![vec![0.0; g.len()]], bp: vec![vec![0.0; g.len()]] };
    let hand = check_symmetrizer(&zero, 1.0, 1.0, 0.5)?;
    let hand_ok = hand.c_delta == 0.5 && c_delta(1.0, 1.0, 0.5) == 0.5 && hand.ok;
    Ok(outcome(
        pass && hand_ok && checked > 0,
        format!("{checked} pipeline times under the smallness condition, min eig sym(SB) {min_eig:.4} (>= {}), hand case c_delta {}", cfg.delta, hand.c_delta),
    ))
}

fn random_inputs(g: &Arc<Grid>, seed: u64) -> (Vec<f64>, Vec<f64>, Fields4, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut c = || rng.gen_range(-1.0..1.0);
    let (c0, c1, c2, c3, c4, c5, c6) = (c(), c(), c(), c(), c(), c(), c());
    let at = |q: usize| (g.x[q % g.nx], g.y[q / g.nx]);
    let n = g.len();
    let field = |f: &dyn Fn(f64, f64) -> f64| -> Vec<f64> { (0..n).map(|q| f(at(q).0, at(q).1)).collect() };
    let ap = field(&|x, y| 0.4 * c0 * (x + c1).sin() * (-y).exp());
    let bp = field(&|x, y| c2 * (2.0 * x).cos() * (-0.5 * y * y).exp());
    let psi = field(&|x, y| (c3 + (x + c4).sin()) * y * (-y).exp());
    let rem = Fields4 {
        u: field(&|x, y| c5 * x.cos() * y * (-y).exp()),
        v: field(&|x, y| c6 * x.sin() * y * y * (-y).exp()),
        h: g.d1().apply(&psi, g.nx),
        g: g.fourier.dx(&psi).iter().map(|v| -v).collect(),
    };
    (ap, bp, rem, psi)
}

fn round_trip(cases: &[CaseResult]) -> prandtl_mhd::Result<Outcome> {
    let g = Grid::physical(16, 96, 8.0, Stretching::Tanh { beta: 2.0 })?;
    let mut worst_trip = 0.0f64;
    let mut worst_div = 0.0f64;
    let div = |f: &Fields4| -> Vec<f64> { g.fourier.dx(&f.u).iter().zip(g.d1().apply(&f.v, g.nx)).map(|(a, b)| a + b).collect() };
    let mut orig = Vec::new();
    let mut tran = Vec::new();
    for seed in 0..100 {
        let (ap, bp, rem, psi) = random_inputs(&g, seed);
        let c = Coefficients { grid: &g, ap: &ap, bp: &bp };
        let t = transform(&rem, &psi, &c)?;
        worst_trip = worst_trip.max(rem.relative_diff(&inverse_transform(&t, &c)?));
        let (d0, d1) = (div(&rem), div(&t.fields));
        worst_div = d0.iter().zip(&d1).fold(worst_div, |m, (a, b)| m.max((a - b).abs()));
        if seed < 4 {
            orig.push(rem);
            tran.push(t.fields);
        }
    }
    let synthetic = domination_constants(&g, &[0.0, 0.1, 0.2, 0.3], &orig, &tran, 2)?;
    let pipeline: Vec<f64> = cases.iter().flat_map(|c| c.diagnostics.as_ref().unwrap().domination.iter().cloned()).collect();
    let dom = synthetic.iter().chain(&pipeline).cloned().fold(0.0f64, f64::max);
    let finite = synthetic.iter().chain(&pipeline).all(|c| c.is_finite()) && !pipeline.is_empty();
    Ok(outcome(
        worst_trip <= 1e-12 && worst_div <= 1e-12 && finite,
        format!("round trip {worst_trip:.1e} over 100 sets (<= 1e-12), divergence change {worst_div:.1e}, max domination constant {dom:.4e}"),
    ))
}

fn structure(cases: &[CaseResult]) -> Outcome {
    let mut pass = true;
    let (mut div, mut bc, mut dec, mut cons) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for c in cases {
        let a = &c.approx;
        let r = &c.remainders;
        let ratio = (0..4)
            .flat_map(|i| r.consistency(i).into_iter().zip(r.l2(i)).map(|(x, y)| x / (0.1 * y + 1e-3)))
            .fold(0.0f64, f64::max);
        println!(
            "  eps {:.3e} divergence {:?} boundary {:.1e} consistency/tolerance {ratio:.3}",
            c.eps,
            a.fd_divergence(),
            a.boundary_report().worst()
        );
        for (m4, spread) in a.fd_divergence() {
            pass &= m4 <= 10.0 * spread + 1e-10;
            div = div.max(m4);
        }
        let lowered = a.div_u.iter().chain(&a.div_h).fold(0.0f64, |m, v| m.max(*v));
        pass &= lowered <= 1e-10;
        let w = a.boundary_report().worst();
        pass &= w <= 1e-8;
        bc = bc.max(w);
        pass &= r.decomposition_defect <= 1e-12;
        dec = dec.max(r.decomposition_defect);
        for i in 0..4 {
            let (n, k) = (r.l2(i), r.consistency(i));
            for (x, y) in k.iter().zip(&n) {
                pass &= *x <= 0.1 * y + 1e-3;
                cons = cons.max(*x / (0.1 * y + 1e-3));
            }
        }
    }
    outcome(
        pass && !cases.is_empty(),
        format!(
            "{} runs: FD4 divergence {div:.1e}, boundary {bc:.1e} (<= 1e-8), split defect {dec:.1e}, consistency/tolerance {cons:.3}",
            cases.len()
        ),
    )
}

fn report(n: usize, start: Instant, r: prandtl_mhd::Result<Outcome>) -> bool {
    let secs = start.elapsed().as_secs_f64();
    match r {
        Ok(o) => {
            println!("criterion {n}: {} {} [{secs:.1}s]", if o.pass { "PASS" } else { "FAIL" }, o.detail);
            o.pass
        }
        Err(e) => {
            println!("criterion {n}: FAIL error: {e} [{secs:.1}s]");
            false
        }
    }
}

fn main() -> ExitCode {
    let mut all = true;
    all &= report(1, Instant::now(), equilibrium());
    all &= report(2, Instant::now(), similarity());
    all &= report(3, Instant::now(), positivity());

    let cfg = StudyConfig::default();
    let start = Instant::now();
    match run_study(&cfg, 4) {
        Ok((rep, cases)) => {
            println!("  default sweep finished in {:.1}s", start.elapsed().as_secs_f64());
            all &= report(4, Instant::now(), remainder_order(&rep, &cases));
            all &= report(5, Instant::now(), Ok(convergence(&rep)));
            all &= report(6, Instant::now(), energy(&cfg, &cases));
            all &= report(7, Instant::now(), symmetrizer(&cfg, &cases));
            all &= report(8, Instant::now(), round_trip(&cases));
            all &= report(9, Instant::now(), Ok(structure(&cases)));
        }
        Err(e) => {
            for n in 4..=9 {
                println!("criterion {n}: FAIL default sweep error: {e}");
            }
            all = false;
        }
    }
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
