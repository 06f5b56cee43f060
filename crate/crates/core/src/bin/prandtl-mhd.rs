use clap::{Parser, Subcommand};
use prandtl_mhd::assembler::{remainder_norms, write_norms_csv};
use prandtl_mhd::diagnostics::write_diagnostics_csv;
use prandtl_mhd::fields::io::dump_series;
use prandtl_mhd::fields::{Grid, ScalarField};
use prandtl_mhd::study::{
    assemble_and_check, build_stages, emit_report, run_case, run_study, viscous_params, StudyConfig,
};
use prandtl_mhd::viscous::{energy_budget, solve_viscous_mhd};
use prandtl_mhd::Result;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

#[derive(Parser, Debug)]
#[command(name = "prandtl-mhd", version, about = "Prandtl-ansatz boundary layers for 2D viscous MHD")]
struct Cli {
    /// `key = value` configuration file; defaults apply to missing keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides `out_dir`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for the ε cases.
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,
    /// Seed for synthetic-noise checks; the solvers are deterministic.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Ideal MHD inner flow.
    Inner0,
    /// Leading-order layer; writes the min h^p series.
    Bl0,
    /// Linearized inner flow.
    Inner1,
    /// First-order layer.
    Bl1,
    /// Assembled approximation and remainder norms for each ε.
    Assemble,
    /// Viscous reference solve and energy budget for each ε.
    Viscous,
    /// Symmetrizer and transformation diagnostics for each ε.
    Diagnose,
    /// The ε-sweep: convergence.csv and rate.txt.
    Study,
}

fn frames<'a>(times: &[f64], fields: &'a [Vec<ScalarField>]) -> Vec<(f64, Vec<&'a ScalarField>)> {
    times.iter().zip(fields).map(|(t, f)| (*t, f.iter().collect())).collect()
}

fn wrap(grid: &Arc<Grid>, names: &[&str], series: &[&Vec<Vec<f64>>]) -> Vec<Vec<ScalarField>> {
    let nt = series[0].len();
    (0..nt)
        .map(|k| {
            names
                .iter()
                .zip(series)
                .map(|(n, s)| ScalarField { grid: grid.clone(), values: s[k].clone(), quantity: n.to_string() })
                .collect()
        })
        .collect()
}

fn write_lines(path: &Path, header: &str, rows: impl Iterator<Item = String>) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "{header}")?;
    for r in rows {
        writeln!(f, "{r}")?;
    }
    f.flush()?;
    Ok(())
}

fn eps_tag(eps: f64) -> String {
    format!("eps_{eps:.3e}")
}

fn run(cli: &Cli) -> Result<bool> {
    let mut cfg = match &cli.config {
        Some(p) => StudyConfig::from_file(p)?,
        None => StudyConfig::default(),
    };
    if let Some(o) = &cli.out {
        cfg.out_dir = o.clone();
    }
    cfg.validate()?;
    let out = cfg.out_dir.clone();
    std::fs::create_dir_all(&out)?;
    std::fs::write(out.join("config.txt"), cfg.to_text())?;
    log::info!("seed {} (solvers are deterministic)", cli.seed);

    if let Command::Study = cli.command {
        let (report, _) = run_study(&cfg, cli.jobs)?;
        for r in &report.rows {
            println!("eps={:.3e} linf={:.4e} l2={:.4e} walltime={:.1}s", r.eps, r.linf_error, r.l2_error, r.walltime_s);
        }
        match &report.fit {
            Some(f) => println!("slope={:.4} ci95={:.4} n={} monotone={}", f.slope, f.ci95, f.n_points, report.monotone()),
            None => println!("fewer than three usable points; no fit"),
        }
        for (eps, e) in &report.failures {
            eprintln!("eps={eps:.3e} failed: {e}");
        }
        if !report.rows.is_empty() {
            emit_report(&report, &out)?;
        }
        return Ok(report.failures.is_empty() && !report.rows.is_empty());
    }

    let (parts, bl0) = build_stages(&cfg)?;
    let grid = parts.inner0.grid.clone();
    let lg = bl0.grid.clone();
    match cli.command {
        Command::Inner0 => {
            let t = &parts.inner0;
            let fields: Vec<Vec<ScalarField>> = t
                .states
                .iter()
                .map(|s| {
                    let mut v = vec![s.u.clone(), s.v.clone(), s.h.clone(), s.g.clone()];
                    v.extend(s.p.clone());
                    v
                })
                .collect();
            dump_series(&out.join("inner0"), "inner0", &frames(&t.times, &fields))?;
            write_lines(
                &out.join("inner0_wall_h_min.csv"),
                "time,wall_h_min",
                t.times.iter().zip(&t.wall_h_min).map(|(a, b)| format!("{a},{b:e}")),
            )?;
            println!("inner0: {} snapshots, t1={:?}", t.times.len(), t.t1);
        }
        Command::Bl0 => {
            let f = wrap(&lg, &["u_p", "v_p", "h_p", "g_p"], &[&bl0.up, &bl0.vp, &bl0.hp, &bl0.gp]);
            dump_series(&out.join("bl0"), "bl0", &frames(&bl0.times, &f))?;
            write_lines(
                &out.join("bl0_hp_min.csv"),
                "time,hp_min,bound",
                bl0.times.iter().zip(&bl0.hp_min).map(|(a, b)| format!("{a},{b:e},{:e}", 0.5 * bl0.delta0)),
            )?;
            let m = bl0.hp_min.iter().cloned().fold(f64::INFINITY, f64::min);
            println!("bl0: min h^p = {m:.6} (delta0/2 = {:.6})", 0.5 * bl0.delta0);
        }
        Command::Inner1 => {
            let t = &parts.inner1;
            let fields: Vec<Vec<ScalarField>> =
                t.states.iter().map(|s| vec![s.u.clone(), s.v.clone(), s.h.clone(), s.g.clone()]).collect();
            dump_series(&out.join("inner1"), "inner1", &frames(&t.times, &fields))?;
            println!("inner1: {} snapshots", t.times.len());
        }
        Command::Bl1 => {
            let p = &parts.profile1;
            let f = wrap(&lg, &["u_b1", "v_b1", "h_b1", "g_b1"], &[&p.ub, &p.vb, &p.hb, &p.gb]);
            dump_series(&out.join("bl1"), "bl1", &frames(&p.times, &f))?;
            println!("bl1: {} snapshots", p.times.len());
        }
        Command::Assemble => {
            for &eps in &cfg.eps_list {
                let (approx, report) = assemble_and_check(&parts, &cfg, eps)?;
                let rows = remainder_norms(&report, cfg.remainder_orders);
                write_norms_csv(&out.join(format!("remainder_norms_{}.csv", eps_tag(eps))), &rows)?;
                if cfg.dump_fields {
                    let f = wrap(&grid, &["u_a", "v_a", "h_a", "g_a", "p_a"], &[&approx.ua, &approx.va, &approx.ha, &approx.ga, &approx.pa]);
                    dump_series(&out.join(format!("assemble_{}", eps_tag(eps))), "approx", &frames(&approx.times, &f))?;
                }
                let sup = |i: usize| report.l2(i).into_iter().fold(0.0f64, f64::max);
                println!(
                    "eps={eps:.3e} R_L2=[{:.3e}, {:.3e}, {:.3e}, {:.3e}] boundary={:.3e} decomposition={:.3e}",
                    sup(0),
                    sup(1),
                    sup(2),
                    sup(3),
                    approx.boundary_report().worst(),
                    report.decomposition_defect
                );
            }
        }
        Command::Viscous => {
            let init = cfg.preset_value().initial_state(&grid);
            for &eps in &cfg.eps_list {
                let params = viscous_params(&cfg, eps)?;
                let traj = solve_viscous_mhd(&init, &params, &grid)?;
                let b = energy_budget(&traj, &params);
                let n = b.times.len();
                write_lines(
                    &out.join(format!("energy_{}.csv", eps_tag(eps))),
                    "time,energy,dissipation,residual",
                    (0..n).map(|k| {
                        let r = if k == 0 { 0.0 } else { b.residual[k - 1] };
                        format!("{},{:e},{:e},{:e}", b.times[k], b.energy[k], b.dissipation[k], r)
                    }),
                )?;
                if cfg.dump_fields {
                    let fields: Vec<Vec<ScalarField>> =
                        traj.states.iter().map(|s| vec![s.u.clone(), s.v.clone(), s.h.clone(), s.g.clone()]).collect();
                    dump_series(&out.join(format!("viscous_{}", eps_tag(eps))), "viscous", &frames(&traj.times, &fields))?;
                }
                println!("eps={eps:.3e} budget max relative residual {:.3e}", b.max_relative);
            }
        }
        Command::Diagnose => {
            let cfg = StudyConfig { diagnostics: true, ..cfg.clone() };
            for &eps in &cfg.eps_list {
                let case = run_case(&parts, &bl0, &cfg, eps)?;
                if let Some(d) = &case.diagnostics {
                    write_diagnostics_csv(&out.join(format!("diagnostics_{}.csv", eps_tag(eps))), &d.symmetrizer, &d.domination)?;
                    let c = d.domination.iter().cloned().fold(0.0f64, f64::max);
                    println!(
                        "eps={eps:.3e} ok={} c_delta={:.4} min_SB_eig={:.4} T_delta={:.4} domination={c:.4e}",
                        d.symmetrizer.ok, d.symmetrizer.c_delta, d.symmetrizer.min_sb_eig, d.symmetrizer.t_delta_estimate
                    );
                }
            }
        }
        Command::Study => unreachable!("handled above"),
    }
    Ok(true)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
