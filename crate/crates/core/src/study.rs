//! Configuration, the composed pipeline, the ε-sweep, rate fitting and reports.

use crate::assembler::{assemble, remainders, ApproxSolution, Constituents, Lift, RemainderReport};
use crate::bl0::{derive_profile0, solve_bl0, BLState0, LayerParams};
use crate::bl1::{boundary_corrector_rho, pressure_corrector, solve_bl1};
use crate::cutoff::CutoffChi;
use crate::error::{Error, Result};
use crate::fields::{Grid, Stretching};
use crate::inner0::{
    attach_first_order, extract_trace, solve_ideal_mhd_with, IdealOptions, Preset, ShearSpec, WaveSpec,
};
use crate::diagnostics::{
    check_symmetrizer, Fields4, compute_ap_bp, domination_constants, stream_function, transform, SymmetrizerReport,
};
use crate::fields::io::write_mhdb;
use crate::fields::time::interp;
use crate::fields::{linf_raw, ScalarField};
use crate::inner0::InnerTrajectory;
use crate::inner1::{bc_from_profile0, solve_linearized_mhd_with};
use crate::viscous::{solve_viscous_mhd, ViscousParams};
use rayon::prelude::*;
use statrs::distribution::{ContinuousCDF, StudentsT};
use std::collections::BTreeMap;
use std::io::Write;
use std::time::Instant;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PresetKind {
    UniformField,
    StationaryShear,
    NumericalInner,
}

impl FromStr for PresetKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform_field" => Ok(PresetKind::UniformField),
            "stationary_shear" => Ok(PresetKind::StationaryShear),
            "numerical_inner" => Ok(PresetKind::NumericalInner),
            _ => Err(Error::Config(format!("unknown preset '{s}'"))),
        }
    }
}

impl PresetKind {
    pub fn name(&self) -> &'static str {
        match self {
            PresetKind::UniformField => "uniform_field",
            PresetKind::StationaryShear => "stationary_shear",
            PresetKind::NumericalInner => "numerical_inner",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StudyConfig {
    pub preset: PresetKind,
    /// Amplitudes of the preset: velocity, base field, field perturbation.
    pub u_amp: f64,
    pub h_base: f64,
    pub h_amp: f64,
    pub eps_list: Vec<f64>,
    pub mu: f64,
    pub kappa: f64,
    /// Wall non-degeneracy level; `None` means min h(x, 0) of the data.
    pub delta0: Option<f64>,
    /// Symmetrizer positivity level.
    pub delta: f64,
    pub t_end: f64,
    pub nx: usize,
    pub ny: usize,
    pub ly: f64,
    pub beta: f64,
    pub n_eta: usize,
    pub l_eta: f64,
    pub dt_inner: f64,
    pub dt_layer: f64,
    pub dt_viscous: f64,
    pub cadence: usize,
    pub out_dir: PathBuf,
    pub dump_fields: bool,
    pub remainder_orders: usize,
    pub diagnostics: bool,
}

impl Default for StudyConfig {
    fn default() -> Self {
        StudyConfig {
            preset: PresetKind::NumericalInner,
            u_amp: 0.1,
            h_base: 1.0,
            h_amp: 0.1,
            eps_list: vec![1e-2, 10f64.powf(-2.5), 1e-3, 10f64.powf(-3.5)],
            mu: 1.0,
            kappa: 1.0,
            delta0: None,
            delta: 0.5,
            t_end: 0.5,
            nx: 32,
            ny: 512,
            ly: 8.0,
            beta: 3.0,
            n_eta: 256,
            l_eta: 30.0,
            dt_inner: 0.005,
            dt_layer: 0.005,
            dt_viscous: 0.001,
            cadence: 10,
            out_dir: PathBuf::from("out"),
            dump_fields: false,
            remainder_orders: 2,
            diagnostics: true,
        }
    }
}

fn parse<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse().map_err(|_| Error::Config(format!("{key}: cannot parse '{v}'")))
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(Error::Config(format!("{key}: expected true/false, got '{v}'"))),
    }
}

impl StudyConfig {
    /// Parse `key = value` lines with `#` comments on top of the defaults.
    pub fn parse(text: &str) -> Result<StudyConfig> {
        let mut c = StudyConfig::default();
        for (no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected 'key = value'", no + 1)))?;
            let (k, v) = (k.trim(), v.trim());
            match k {
                "preset" => c.preset = v.parse()?,
                "u_amp" => c.u_amp = parse(k, v)?,
                "h_base" => c.h_base = parse(k, v)?,
                "h_amp" => c.h_amp = parse(k, v)?,
                "eps_list" => {
                    c.eps_list = v
                        .split(',')
                        .map(|s| parse::<f64>(k, s.trim()))
                        .collect::<Result<Vec<_>>>()?
                }
                "mu" => c.mu = parse(k, v)?,
                "kappa" => c.kappa = parse(k, v)?,
                "delta0" => c.delta0 = if v == "auto" { None } else { Some(parse(k, v)?) },
                "delta" => c.delta = parse(k, v)?,
                "t_end" => c.t_end = parse(k, v)?,
                "nx" => c.nx = parse(k, v)?,
                "ny" => c.ny = parse(k, v)?,
                "ly" => c.ly = parse(k, v)?,
                "beta" => c.beta = parse(k, v)?,
                "n_eta" => c.n_eta = parse(k, v)?,
                "l_eta" => c.l_eta = parse(k, v)?,
                "dt_inner" => c.dt_inner = parse(k, v)?,
                "dt_layer" => c.dt_layer = parse(k, v)?,
                "dt_viscous" => c.dt_viscous = parse(k, v)?,
                "cadence" => c.cadence = parse(k, v)?,
                "out_dir" => c.out_dir = PathBuf::from(v),
                "dump_fields" => c.dump_fields = parse_bool(k, v)?,
                "remainder_orders" => c.remainder_orders = parse(k, v)?,
                "diagnostics" => c.diagnostics = parse_bool(k, v)?,
                _ => return Err(Error::Config(format!("line {}: unknown key '{k}'", no + 1))),
            }
        }
        c.validate()?;
        Ok(c)
    }

    pub fn from_file(path: &Path) -> Result<StudyConfig> {
        StudyConfig::parse(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.eps_list.iter().any(|&e| !(e > 0.0 && e <= 1.0)) {
            return bad("eps_list entries must lie in (0, 1]".into());
        }
        if self.eps_list.windows(2).any(|w| w[1] >= w[0]) {
            return bad("eps_list must be strictly decreasing".into());
        }
        if !(self.t_end > 0.0) {
            return bad("t_end must be positive".into());
        }
        for (name, v) in [
            ("mu", self.mu),
            ("kappa", self.kappa),
            ("dt_inner", self.dt_inner),
            ("dt_layer", self.dt_layer),
            ("dt_viscous", self.dt_viscous),
            ("ly", self.ly),
            ("l_eta", self.l_eta),
            ("beta", self.beta),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} must be positive"));
            }
        }
        if self.cadence == 0 {
            return bad("cadence must be at least 1".into());
        }
        Ok(())
    }

    /// Key/value lines that parse back to this configuration.
    pub fn to_text(&self) -> String {
        let mut m = BTreeMap::new();
        m.insert("preset", self.preset.name().to_string());
        m.insert("u_amp", self.u_amp.to_string());
        m.insert("h_base", self.h_base.to_string());
        m.insert("h_amp", self.h_amp.to_string());
        m.insert("eps_list", self.eps_list.iter().map(|e| e.to_string()).collect::<Vec<_>>().join(", "));
        m.insert("mu", self.mu.to_string());
        m.insert("kappa", self.kappa.to_string());
        m.insert("delta0", self.delta0.map_or("auto".to_string(), |d| d.to_string()));
        m.insert("delta", self.delta.to_string());
        m.insert("t_end", self.t_end.to_string());
        m.insert("nx", self.nx.to_string());
        m.insert("ny", self.ny.to_string());
        m.insert("ly", self.ly.to_string());
        m.insert("beta", self.beta.to_string());
        m.insert("n_eta", self.n_eta.to_string());
        m.insert("l_eta", self.l_eta.to_string());
        m.insert("dt_inner", self.dt_inner.to_string());
        m.insert("dt_layer", self.dt_layer.to_string());
        m.insert("dt_viscous", self.dt_viscous.to_string());
        m.insert("cadence", self.cadence.to_string());
        m.insert("out_dir", self.out_dir.display().to_string());
        m.insert("dump_fields", self.dump_fields.to_string());
        m.insert("remainder_orders", self.remainder_orders.to_string());
        m.insert("diagnostics", self.diagnostics.to_string());
        m.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    pub fn preset_value(&self) -> Preset {
        match self.preset {
            PresetKind::UniformField => Preset::UniformField { c: self.h_base },
            PresetKind::StationaryShear => {
                Preset::StationaryShear(ShearSpec { u_amp: self.u_amp, h_base: self.h_base, h_amp: self.h_amp })
            }
            PresetKind::NumericalInner => {
                Preset::NumericalInner(WaveSpec { u_amp: self.u_amp, h_base: self.h_base, h_amp: self.h_amp })
            }
        }
    }

    pub fn grid(&self) -> Result<Arc<Grid>> {
        Grid::physical(self.nx, self.ny, self.ly, Stretching::Tanh { beta: self.beta })
    }

    pub fn layer_grid(&self) -> Result<Arc<Grid>> {
        Grid::layer(self.nx, self.n_eta, self.l_eta)
    }

    pub fn params(&self) -> LayerParams {
        LayerParams { mu: self.mu, kappa: self.kappa }
    }
}

/// Run every ε-independent stage: inner0 → bl0 → inner1 → bl1, the layer
/// pressure and ρ. Errors carry the failing stage.
pub fn build_constituents(cfg: &StudyConfig) -> Result<Constituents> {
    build_stages(cfg).map(|(parts, _)| parts)
}

/// `build_constituents` plus the raw leading layer state.
pub fn build_stages(cfg: &StudyConfig) -> Result<(Constituents, BLState0)> {
    let grid = cfg.grid().map_err(|e| e.at("grid"))?;
    let lg = cfg.layer_grid().map_err(|e| e.at("grid"))?;
    let init = cfg.preset_value().initial_state(&grid);
    let nx = grid.nx;
    let delta0 = cfg.delta0.unwrap_or_else(|| init.h.values[..nx].iter().cloned().fold(f64::INFINITY, f64::min));
    let opts = IdealOptions { cadence: cfg.cadence, delta0: Some(delta0), ..IdealOptions::default() };
    let inner0 = solve_ideal_mhd_with(&init, cfg.t_end, &grid, cfg.dt_inner, &opts, None).map_err(|e| e.at("inner0"))?;
    let mut trace = extract_trace(&inner0);
    // The solver's own wall row can differ from the analytic data at truncation level.
    let delta0 = cfg.delta0.unwrap_or_else(|| trace.hbar[0].iter().cloned().fold(delta0, f64::min));
    let bl0 = solve_bl0(&trace, delta0, cfg.t_end, &lg, cfg.dt_layer, cfg.params()).map_err(|e| e.at("bl0"))?;
    let profile0 = derive_profile0(&bl0, &trace);
    let wall = bc_from_profile0(&profile0);
    let opts1 = IdealOptions { delta0: None, ..opts };
    let inner1 = solve_linearized_mhd_with(&inner0, &wall, cfg.t_end, &grid, cfg.dt_inner, &opts1, None)
        .map_err(|e| e.at("inner1"))?;
    attach_first_order(&mut trace, &inner1);
    let pressure = pressure_corrector(&profile0, &trace, cfg.mu).map_err(|e| e.at("bl1"))?;
    let profile1 = solve_bl1(&profile0, &trace, cfg.params(), cfg.t_end, &lg, cfg.dt_layer).map_err(|e| e.at("bl1"))?;
    let rho = boundary_corrector_rho(&inner1, &lg, &CutoffChi);
    Ok((Constituents { inner0, trace, profile0, inner1, profile1, pressure, rho }, bl0))
}

/// Assemble at one ε and evaluate the remainders.
pub fn assemble_and_check(parts: &Constituents, cfg: &StudyConfig, eps: f64) -> Result<(ApproxSolution, RemainderReport)> {
    let grid = parts.inner0.grid.clone();
    let approx = assemble(eps, parts.clone(), CutoffChi, &grid).map_err(|e| e.at("assemble"))?;
    let report = remainders(&approx, cfg.mu, cfg.kappa).map_err(|e| e.at("remainders"))?;
    Ok((approx, report))
}

/// Error of the viscous solution against the theorem's comparand
/// (u⁰, H⁰) + (u_b⁰, √ε v_b⁰, h_b⁰, √ε g_b⁰)(t, x, y/√ε), per viscous time.
#[derive(Clone, Debug)]
pub struct ErrorSeries {
    pub times: Vec<f64>,
    /// max |·| of u, v, h, g per time.
    pub linf: Vec<[f64; 4]>,
    /// L² norm of the stacked components per time.
    pub l2: Vec<f64>,
    /// Error fields at the time of the largest L∞ error.
    pub worst: Fields4,
}

impl ErrorSeries {
    pub fn sup_linf(&self) -> f64 {
        self.linf.iter().flatten().fold(0.0f64, |m, v| m.max(*v))
    }

    pub fn sup_component(&self, c: usize) -> f64 {
        self.linf.iter().fold(0.0f64, |m, v| m.max(v[c]))
    }

    pub fn sup_l2(&self) -> f64 {
        self.l2.iter().fold(0.0f64, |m, v| m.max(*v))
    }
}

/// Symmetrizer and transformation diagnostics of one case.
#[derive(Clone, Debug)]
pub struct CaseDiagnostics {
    pub symmetrizer: SymmetrizerReport,
    /// Measured norm-domination constant per coefficient time.
    pub domination: Vec<f64>,
    /// max |g + ∂_xψ| of the magnetic remainder's stream function over time.
    pub stream_residual: f64,
}

/// Everything produced for one ε.
#[derive(Clone, Debug)]
pub struct CaseResult {
    pub eps: f64,
    pub approx: ApproxSolution,
    pub remainders: RemainderReport,
    pub viscous: InnerTrajectory,
    pub errors: ErrorSeries,
    pub diagnostics: Option<CaseDiagnostics>,
    pub walltime_s: f64,
}

impl CaseResult {
    pub fn row(&self) -> ConvergenceRow {
        let r = |i: usize| self.remainders.l2(i).into_iter().fold(0.0f64, f64::max);
        ConvergenceRow {
            eps: self.eps,
            linf_error: self.errors.sup_linf(),
            l2_error: self.errors.sup_l2(),
            linf: [0, 1, 2, 3].map(|c| self.errors.sup_component(c)),
            remainder_l2: [0, 1, 2, 3].map(r),
            walltime_s: self.walltime_s,
        }
    }
}

/// Viscous parameters for `cfg` at `eps`, storing on the inner snapshot times.
pub fn viscous_params(cfg: &StudyConfig, eps: f64) -> Result<ViscousParams> {
    let every = cfg.dt_inner * cfg.cadence as f64;
    let cadence = ((every / cfg.dt_viscous).round() as usize).max(1);
    Ok(ViscousParams::new(eps, cfg.mu, cfg.kappa, cfg.t_end, cfg.dt_viscous)?.with_cadence(cadence))
}

fn component_series(traj: &InnerTrajectory, c: usize) -> Vec<Vec<f64>> {
    traj.states.iter().map(|s| [&s.u, &s.v, &s.h, &s.g][c].values.clone()).collect()
}

fn fields_at(series: &[Vec<Vec<f64>>], times: &[f64], t: f64) -> Fields4 {
    let f = |c: usize| interp(times, &series[c], t);
    Fields4 { u: f(0), v: f(1), h: f(2), g: f(3) }
}

/// viscous − [(u⁰, H⁰) + (u_b⁰, √ε v_b⁰, h_b⁰, √ε g_b⁰)(y/√ε)] at the viscous times.
pub fn comparand_error(parts: &Constituents, viscous: &InnerTrajectory, eps: f64) -> Result<ErrorSeries> {
    let grid = &viscous.grid;
    let p0 = &parts.profile0;
    let se = eps.sqrt();
    let lift = Lift::new(grid, &p0.grid, se);
    let inner: Vec<Vec<Vec<f64>>> = (0..4).map(|c| component_series(&parts.inner0, c)).collect();
    let t_max = parts.inner0.times.last().copied().unwrap_or(0.0).min(p0.times.last().copied().unwrap_or(0.0));
    let mut out = ErrorSeries { times: Vec::new(), linf: Vec::new(), l2: Vec::new(), worst: Fields4::zeros(grid.len()) };
    let mut worst = -1.0;
    for (k, &t) in viscous.times.iter().enumerate() {
        if t > t_max + 1e-12 {
            return Err(Error::TimeWindow(format!("viscous time {t} beyond the constructed window {t_max}")));
        }
        let base = fields_at(&inner, &parts.inner0.times, t);
        let layer = p0.sample(t);
        let s = &viscous.states[k];
        let diff = |v: &[f64], b: &[f64], l: &[f64], w: f64| -> Vec<f64> {
            let l = lift.apply(l, false);
            v.iter().zip(b).zip(&l).map(|((v, b), l)| v - b - w * l).collect()
        };
        let e = Fields4 {
            u: diff(&s.u.values, &base.u, &layer.ub, 1.0),
            v: diff(&s.v.values, &base.v, &layer.vb, se),
            h: diff(&s.h.values, &base.h, &layer.hb, 1.0),
            g: diff(&s.g.values, &base.g, &layer.gb, se),
        };
        let linf = e.components().map(|c| linf_raw(c));
        let m = linf.iter().fold(0.0f64, |a, b| a.max(*b));
        out.times.push(t);
        out.linf.push(linf);
        out.l2.push(e.l2(grid));
        if m > worst {
            worst = m;
            out.worst = e;
        }
    }
    Ok(out)
}

/// Coefficients, symmetrizer checks and the transformation applied to the
/// remainder (u^ε − u^a, …) at the coefficient times.
pub fn case_diagnostics(bl0: &BLState0, approx: &ApproxSolution, viscous: &InnerTrajectory, cfg: &StudyConfig) -> Result<CaseDiagnostics> {
    let grid = &approx.grid;
    let coeffs = compute_ap_bp(bl0, approx.eps, &CutoffChi, grid)?;
    let symmetrizer = check_symmetrizer(&coeffs, cfg.mu, cfg.kappa, cfg.delta)?;
    let visc: Vec<Vec<Vec<f64>>> = (0..4).map(|c| component_series(viscous, c)).collect();
    let assembled = [&approx.ua, &approx.va, &approx.ha, &approx.ga];
    let t_max = viscous.times.last().copied().unwrap_or(0.0);
    let mut times = Vec::new();
    let mut original = Vec::new();
    let mut transformed = Vec::new();
    let mut stream_residual = 0.0f64;
    for (k, &t) in coeffs.times.iter().enumerate() {
        if t > t_max + 1e-12 {
            break;
        }
        let v = fields_at(&visc, &viscous.times, t);
        let a = assembled.map(|s| interp(&approx.times, s, t));
        let sub = |x: &[f64], y: &[f64]| -> Vec<f64> { x.iter().zip(y).map(|(p, q)| p - q).collect() };
        let rem = Fields4 { u: sub(&v.u, &a[0]), v: sub(&v.v, &a[1]), h: sub(&v.h, &a[2]), g: sub(&v.g, &a[3]) };
        let sf = stream_function(grid, &rem.h, &rem.g)?;
        stream_residual = stream_residual.max(sf.residual);
        let tr = transform(&rem, &sf.psi, &coeffs.snapshot(k))?;
        times.push(t);
        original.push(rem);
        transformed.push(tr.fields);
    }
    let domination = domination_constants(grid, &times, &original, &transformed, cfg.remainder_orders)?;
    for (t, c) in times.iter().zip(&domination) {
        log::info!("eps={:.3e} t={t:.4}: domination constant {c:.4e}", approx.eps);
    }
    Ok(CaseDiagnostics { symmetrizer, domination, stream_residual })
}

/// Assemble, evaluate remainders, run the viscous solve from the same initial
/// data and measure the error against the comparand, for one ε.
pub fn run_case(parts: &Constituents, bl0: &BLState0, cfg: &StudyConfig, eps: f64) -> Result<CaseResult> {
    let clock = Instant::now();
    let (approx, report) = assemble_and_check(parts, cfg, eps)?;
    let grid = parts.inner0.grid.clone();
    let params = viscous_params(cfg, eps).map_err(|e| e.at("viscous"))?;
    let init = cfg.preset_value().initial_state(&grid);
    let viscous = solve_viscous_mhd(&init, &params, &grid).map_err(|e| e.at("viscous"))?;
    let errors = comparand_error(parts, &viscous, eps).map_err(|e| e.at("compare"))?;
    let diagnostics = if cfg.diagnostics {
        Some(case_diagnostics(bl0, &approx, &viscous, cfg).map_err(|e| e.at("diagnose"))?)
    } else {
        None
    };
    Ok(CaseResult { eps, approx, remainders: report, viscous, errors, diagnostics, walltime_s: clock.elapsed().as_secs_f64() })
}

/// The full pipeline for one ε, from the configuration.
pub fn run_pipeline(cfg: &StudyConfig, eps: f64) -> Result<CaseResult> {
    cfg.validate()?;
    let (parts, bl0) = build_stages(cfg)?;
    run_case(&parts, &bl0, cfg, eps)
}

/// Least-squares fit of log error against log ε.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    /// Half-width of the 95% confidence interval of the slope.
    pub ci95: f64,
    pub n_points: usize,
}

/// Fit error ≈ C ε^slope. Non-positive errors are dropped with a warning;
/// fewer than three usable points are refused.
pub fn fit_rate(eps: &[f64], errors: &[f64]) -> Result<RateFit> {
    if eps.len() != errors.len() {
        return Err(Error::Fit(format!("{} eps values for {} errors", eps.len(), errors.len())));
    }
    let mut pts = Vec::new();
    for (&e, &r) in eps.iter().zip(errors) {
        if e > 0.0 && r > 0.0 && r.is_finite() {
            pts.push((e.ln(), r.ln()));
        } else {
            log::warn!("fit_rate: dropping point eps={e}, error={r}");
        }
    }
    let n = pts.len();
    if n < 3 {
        return Err(Error::Fit(format!("need at least 3 positive points, have {n}")));
    }
    let nf = n as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / nf;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / nf;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Fit("all eps values coincide".into()));
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    let df = nf - 2.0;
    let se = (sse / df / sxx).sqrt();
    let t = StudentsT::new(0.0, 1.0, df).map_err(|e| Error::Fit(e.to_string()))?.inverse_cdf(0.975);
    Ok(RateFit { slope, intercept, ci95: t * se, n_points: n })
}

/// One row of `convergence.csv`.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceRow {
    pub eps: f64,
    pub linf_error: f64,
    pub l2_error: f64,
    pub linf: [f64; 4],
    pub remainder_l2: [f64; 4],
    pub walltime_s: f64,
}

pub const CONVERGENCE_HEADER: &str = "eps,linf_error,l2_error,linf_u,linf_v,linf_h,linf_g,r1_l2,r2_l2,r3_l2,r4_l2,walltime_s";

#[derive(Clone, Debug, Default)]
pub struct ConvergenceReport {
    /// Ordered by decreasing ε.
    pub rows: Vec<ConvergenceRow>,
    /// Fit of the sup-time L∞ error; `None` with fewer than three rows.
    pub fit: Option<RateFit>,
    /// Fits of sup-time ‖R_i‖_{L²}.
    pub remainder_fits: [Option<RateFit>; 4],
    /// Grid and configuration used.
    pub metadata: String,
    /// ε values whose case failed, with the error.
    pub failures: Vec<(f64, String)>,
    /// Error of u at its worst time, per row, when field dumps are requested.
    pub error_fields: Vec<ScalarField>,
}

impl ConvergenceReport {
    pub fn from_rows(rows: Vec<ConvergenceRow>, metadata: String) -> ConvergenceReport {
        let eps: Vec<f64> = rows.iter().map(|r| r.eps).collect();
        let fit_of = |f: &dyn Fn(&ConvergenceRow) -> f64| {
            let errs: Vec<f64> = rows.iter().map(f).collect();
            fit_rate(&eps, &errs).ok()
        };
        let fit = fit_of(&|r| r.linf_error);
        let remainder_fits = [0, 1, 2, 3].map(|i| fit_of(&|r: &ConvergenceRow| r.remainder_l2[i]));
        ConvergenceReport { rows, fit, remainder_fits, metadata, failures: Vec::new(), error_fields: Vec::new() }
    }

    /// L∞ errors strictly decrease with ε.
    pub fn monotone(&self) -> bool {
        self.rows.windows(2).all(|w| w[1].linf_error < w[0].linf_error)
    }
}

/// Run the ε-sweep on `jobs` workers. The ε-independent stages run once;
/// each ε case is independent and deterministic. Failed cases are listed
/// in the report instead of aborting the sweep.
pub fn run_study(cfg: &StudyConfig, jobs: usize) -> Result<(ConvergenceReport, Vec<CaseResult>)> {
    cfg.validate()?;
    let (parts, bl0) = build_stages(cfg)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let results: Vec<Result<CaseResult>> =
        pool.install(|| cfg.eps_list.par_iter().map(|&eps| run_case(&parts, &bl0, cfg, eps)).collect());
    let mut cases = Vec::new();
    let mut failures = Vec::new();
    for (&eps, r) in cfg.eps_list.iter().zip(results) {
        match r {
            Ok(c) => cases.push(c),
            Err(e) => {
                log::error!("eps={eps:.3e}: {e}");
                failures.push((eps, e.to_string()));
            }
        }
    }
    let g = &parts.inner0.grid;
    let metadata = format!(
        "grid nx={} ny={} ly={} beta={} n_eta={} l_eta={}; config:\n{}",
        g.nx,
        g.ny,
        cfg.ly,
        cfg.beta,
        cfg.n_eta,
        cfg.l_eta,
        cfg.to_text()
    );
    let mut report = ConvergenceReport::from_rows(cases.iter().map(|c| c.row()).collect(), metadata);
    report.failures = failures;
    if cfg.dump_fields {
        report.error_fields =
            cases.iter().map(|c| ScalarField { grid: g.clone(), values: c.errors.worst.u.clone(), quantity: "error u".into() }).collect();
    }
    Ok((report, cases))
}

/// Write `convergence.csv`, `rate.txt` and, when present, one MHDB dump of
/// the u error per ε.
pub fn emit_report(report: &ConvergenceReport, dir: &Path) -> Result<Vec<PathBuf>> {
    if report.rows.is_empty() {
        return Err(Error::NoData);
    }
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let csv = dir.join("convergence.csv");
    let mut f = std::io::BufWriter::new(std::fs::File::create(&csv)?);
    writeln!(f, "{CONVERGENCE_HEADER}")?;
    for r in &report.rows {
        let mut cols = vec![r.eps, r.linf_error, r.l2_error];
        cols.extend(r.linf);
        cols.extend(r.remainder_l2);
        cols.push(r.walltime_s);
        writeln!(f, "{}", cols.iter().map(|v| format!("{v:e}")).collect::<Vec<_>>().join(","))?;
    }
    f.flush()?;
    written.push(csv);

    let rate = dir.join("rate.txt");
    let mut f = std::io::BufWriter::new(std::fs::File::create(&rate)?);
    match &report.fit {
        Some(fit) => {
            writeln!(f, "slope = {}", fit.slope)?;
            writeln!(f, "ci95 = {}", fit.ci95)?;
            writeln!(f, "n_points = {}", fit.n_points)?;
            writeln!(f, "intercept = {}", fit.intercept)?;
        }
        None => {
            writeln!(f, "slope = nan")?;
            writeln!(f, "ci95 = nan")?;
            writeln!(f, "n_points = {}", report.rows.len())?;
            writeln!(f, "# fewer than three usable points; no fit")?;
        }
    }
    for (i, fit) in report.remainder_fits.iter().enumerate() {
        if let Some(fit) = fit {
            writeln!(f, "r{}_slope = {} # ci95 {}", i + 1, fit.slope, fit.ci95)?;
        }
    }
    writeln!(f, "# target exponent 3/8 - sigma; the asymptotic regime is approached, not reached, at these eps values")?;
    for (eps, e) in &report.failures {
        writeln!(f, "# failed eps = {eps}: {e}")?;
    }
    for line in report.metadata.lines() {
        writeln!(f, "# {line}")?;
    }
    f.flush()?;
    written.push(rate);

    for (k, field) in report.error_fields.iter().enumerate() {
        let path = dir.join(format!("error_u_{k}.mhdb"));
        write_mhdb(&path, field)?;
        written.push(path);
    }
    Ok(written)
}

/// Parse `convergence.csv` written by `emit_report`.
pub fn read_convergence_csv(path: &Path) -> Result<Vec<ConvergenceRow>> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    if lines.next() != Some(CONVERGENCE_HEADER) {
        return Err(Error::Format("convergence.csv header mismatch".into()));
    }
    lines
        .map(|l| {
            let v: Vec<f64> = l
                .split(',')
                .map(|s| s.parse::<f64>().map_err(|_| Error::Format(format!("bad number '{s}'"))))
                .collect::<Result<_>>()?;
            if v.len() != 12 {
                return Err(Error::Format(format!("expected 12 columns, got {}", v.len())));
            }
            Ok(ConvergenceRow {
                eps: v[0],
                linf_error: v[1],
                l2_error: v[2],
                linf: [v[3], v[4], v[5], v[6]],
                remainder_l2: [v[7], v[8], v[9], v[10]],
                walltime_s: v[11],
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::io::{read_mhdb, MAGIC};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn log_spaced(a: f64, b: f64, n: usize) -> Vec<f64> {
        (0..n).map(|k| 10f64.powf(a + (b - a) * k as f64 / (n - 1) as f64)).collect()
    }

    #[test]
    fn config_parses_and_round_trips() {
        let c = StudyConfig::parse("# comment\npreset = stationary_shear\neps_list = 0.01, 0.001, 0.0001\nnx = 16 # trailing\n").unwrap();
        assert_eq!(c.preset, PresetKind::StationaryShear);
        assert_eq!(c.eps_list, vec![0.01, 0.001, 0.0001]);
        assert_eq!(c.nx, 16);
        assert_eq!(StudyConfig::parse(&c.to_text()).unwrap(), c);
        assert!(matches!(StudyConfig::parse("nxx = 3"), Err(Error::Config(_))));
        assert!(StudyConfig::parse("eps_list = 0.001, 0.01").is_err());
        assert!(StudyConfig::parse("eps_list = 2.0").is_err());
        assert!(StudyConfig::parse("t_end = 0").is_err());
        assert!(StudyConfig::parse("nx 16").is_err());
    }

    #[test]
    fn fit_exact_power_law() {
        let eps = log_spaced(-2.0, -3.5, 4);
        let errs: Vec<f64> = eps.iter().map(|e| 2.0 * e.powf(0.375)).collect();
        let f = fit_rate(&eps, &errs).unwrap();
        assert!((f.slope - 0.375).abs() <= 1e-10);
        assert!((f.intercept - 2f64.ln()).abs() <= 1e-10);
        assert!(f.ci95 <= 1e-9);
        assert_eq!(f.n_points, 4);
    }

    #[test]
    fn fit_constant_errors() {
        let eps = log_spaced(-2.0, -3.0, 3);
        let f = fit_rate(&eps, &[0.3, 0.3, 0.3]).unwrap();
        assert!(f.slope.abs() <= 1e-10);
    }

    #[test]
    fn fit_refuses_and_drops() {
        let eps = log_spaced(-2.0, -3.0, 4);
        assert!(matches!(fit_rate(&eps[..2], &[1.0, 0.5]), Err(Error::Fit(_))));
        assert!(matches!(fit_rate(&eps[..3], &[1.0, 0.0, 0.5]), Err(Error::Fit(_))));
        let f = fit_rate(&eps, &[eps[0], -1.0, eps[2], eps[3]]).unwrap();
        assert_eq!(f.n_points, 3);
        assert!((f.slope - 1.0).abs() <= 1e-10);
        assert!(fit_rate(&eps, &[1.0]).is_err());
    }

    #[test]
    fn fit_calibration_under_noise() {
        let eps = log_spaced(-2.0, -4.0, 8);
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        for _ in 0..200 {
            let errs: Vec<f64> = eps.iter().map(|e| e.powf(0.375) * (1.0 + rng.gen_range(-0.05..0.05))).collect();
            let f = fit_rate(&eps, &errs).unwrap();
            assert!((0.33..=0.42).contains(&f.slope), "slope {}", f.slope);
            assert!(f.ci95 > 0.0);
        }
    }

    proptest! {
        #[test]
        fn fit_is_scale_equivariant(c in 1e-6f64..1e6, e in proptest::collection::vec(1e-8f64..1.0, 4)) {
            let eps = log_spaced(-2.0, -3.5, 4);
            let a = fit_rate(&eps, &e).unwrap();
            let scaled: Vec<f64> = e.iter().map(|v| c * v).collect();
            let b = fit_rate(&eps, &scaled).unwrap();
            prop_assert!((a.slope - b.slope).abs() <= 1e-12);
            prop_assert!((b.intercept - a.intercept - c.ln()).abs() <= 1e-9);
        }
    }

    fn synthetic_report(n: usize) -> ConvergenceReport {
        let rows = log_spaced(-2.0, -3.0, n)
            .into_iter()
            .enumerate()
            .map(|(k, eps)| ConvergenceRow {
                eps,
                linf_error: 0.1 * eps.powf(0.4) + 1e-17 * k as f64,
                l2_error: std::f64::consts::PI * eps,
                linf: [eps, 2.0 * eps, 1.0 / 3.0 * eps, eps.sqrt()],
                remainder_l2: [eps, eps * 1.1, eps * 0.7, eps / 7.0],
                walltime_s: 0.123456789,
            })
            .collect();
        ConvergenceReport::from_rows(rows, "synthetic".into())
    }

    #[test]
    fn report_refuses_empty() {
        let dir = tempfile::tempdir().unwrap();
        let e = emit_report(&ConvergenceReport::default(), dir.path()).unwrap_err();
        assert_eq!(e.to_string(), "no data");
    }

    #[test]
    fn report_round_trips_bitwise() {
        let dir = tempfile::tempdir().unwrap();
        let rep = synthetic_report(3);
        assert!(rep.fit.is_some() && rep.monotone());
        emit_report(&rep, dir.path()).unwrap();
        let back = read_convergence_csv(&dir.path().join("convergence.csv")).unwrap();
        assert_eq!(back.len(), 3);
        for (a, b) in rep.rows.iter().zip(&back) {
            assert_eq!(a.eps.to_bits(), b.eps.to_bits());
            assert_eq!(a, b);
        }
        let rate = std::fs::read_to_string(dir.path().join("rate.txt")).unwrap();
        assert!(rate.starts_with("slope = "));
        assert!(rate.contains("ci95 = ") && rate.contains("n_points = 3"));
    }

    #[test]
    fn report_without_fit_states_it() {
        let dir = tempfile::tempdir().unwrap();
        emit_report(&synthetic_report(2), dir.path()).unwrap();
        let rate = std::fs::read_to_string(dir.path().join("rate.txt")).unwrap();
        assert!(rate.contains("slope = nan") && rate.contains("n_points = 2"));
    }

    #[test]
    fn report_dumps_one_field_per_eps() {
        let dir = tempfile::tempdir().unwrap();
        let mut rep = synthetic_report(3);
        let g = Grid::physical(8, 16, 4.0, Stretching::Uniform).unwrap();
        rep.error_fields = (0..3).map(|k| ScalarField::from_fn(g.clone(), "error u", move |x, y| k as f64 * x.sin() * y)).collect();
        let files = emit_report(&rep, dir.path()).unwrap();
        let dumps: Vec<&PathBuf> = files.iter().filter(|p| p.extension().is_some_and(|e| e == "mhdb")).collect();
        assert_eq!(dumps.len(), 3);
        for (k, p) in dumps.iter().enumerate() {
            assert_eq!(&std::fs::read(p).unwrap()[..4], MAGIC);
            assert_eq!(read_mhdb(p).unwrap().values, rep.error_fields[k].values);
        }
    }
}
