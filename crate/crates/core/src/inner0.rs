//! Zeroth-order ideal MHD flow in the half-strip and its wall traces.

use crate::error::{Error, Result};
use crate::fields::time::{cubic_weights, interp};
use crate::fields::{Grid, ScalarField, VectorState};
use crate::potential::{
    phys, rk3_step, schedule, Dynamics, Engine, Forcing, Kin, Phys, Wall, WallPotentials,
};
use num_complex::Complex64 as C;
use std::sync::Arc;

/// Stationary shear U(y) = u_amp·y·e^{-y²/2}, H(y) = h_base + h_amp·y·e^{-y²/2}.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ShearSpec {
    pub u_amp: f64,
    pub h_base: f64,
    pub h_amp: f64,
}

impl ShearSpec {
    fn bump(y: f64) -> [f64; 3] {
        let e = (-0.5 * y * y).exp();
        [y * e, (1.0 - y * y) * e, (y * y * y - 3.0 * y) * e]
    }
    /// (U, U', U'') at y.
    pub fn u(&self, y: f64) -> [f64; 3] {
        Self::bump(y).map(|b| self.u_amp * b)
    }
    /// (H, H', H'') at y.
    pub fn h(&self, y: f64) -> [f64; 3] {
        let b = Self::bump(y);
        [self.h_base + self.h_amp * b[0], self.h_amp * b[1], self.h_amp * b[2]]
    }
}

/// Smooth data with one x-harmonic:
/// ψ = a·sin x·y²e^{-y²/2}, A = h_base·y + b·cos x·y³e^{-y²/2}.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WaveSpec {
    pub u_amp: f64,
    pub h_base: f64,
    pub h_amp: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Preset {
    UniformField { c: f64 },
    StationaryShear(ShearSpec),
    NumericalInner(WaveSpec),
}

impl Preset {
    pub fn initial_state(&self, grid: &Arc<Grid>) -> VectorState {
        let f = |q: &str, fun: &dyn Fn(f64, f64) -> f64| ScalarField::from_fn(grid.clone(), q, fun);
        match *self {
            Preset::UniformField { c } => VectorState {
                u: f("u", &|_, _| 0.0),
                v: f("v", &|_, _| 0.0),
                h: f("h", &|_, _| c),
                g: f("g", &|_, _| 0.0),
                p: None,
            },
            Preset::StationaryShear(s) => VectorState {
                u: f("u", &|_, y| s.u(y)[0]),
                v: f("v", &|_, _| 0.0),
                h: f("h", &|_, y| s.h(y)[0]),
                g: f("g", &|_, _| 0.0),
                p: None,
            },
            Preset::NumericalInner(w) => {
                let e = |y: f64| (-0.5 * y * y).exp();
                VectorState {
                    u: f("u", &|x, y| w.u_amp * x.sin() * (2.0 * y - y.powi(3)) * e(y)),
                    v: f("v", &|x, y| -w.u_amp * x.cos() * y * y * e(y)),
                    h: f("h", &|x, y| {
                        w.h_base + w.h_amp * x.cos() * (3.0 * y * y - y.powi(4)) * e(y)
                    }),
                    g: f("g", &|x, y| w.h_amp * x.sin() * y.powi(3) * e(y)),
                    p: None,
                }
            }
        }
    }

    /// Exact traces for presets that are stationary solutions.
    pub fn analytic_trace(&self, times: &[f64], nx: usize) -> Option<BoundaryTrace> {
        let (u, h) = match *self {
            Preset::UniformField { c } => ([0.0; 3], [c, 0.0, 0.0]),
            Preset::StationaryShear(s) => (s.u(0.0), s.h(0.0)),
            Preset::NumericalInner(_) => return None,
        };
        let c = |v: f64| vec![vec![v; nx]; times.len()];
        Some(BoundaryTrace {
            nx,
            times: times.to_vec(),
            ubar: c(u[0]),
            hbar: c(h[0]),
            dpdx_wall: c(0.0),
            uy: c(u[1]),
            hy: c(h[1]),
            uyy: c(u[2]),
            hyy: c(h[2]),
            first: None,
        })
    }
}

#[derive(Clone, Debug)]
pub struct Check {
    pub name: &'static str,
    pub pass: bool,
    pub measured: f64,
    pub margin: f64,
}

#[derive(Clone, Debug)]
pub struct InitialDataReport {
    pub checks: Vec<Check>,
}

impl InitialDataReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
    pub fn get(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// Divergence, wall, and non-degeneracy checks; never fails.
pub fn initial_data_report(init: &VectorState, delta0: f64) -> Result<InitialDataReport> {
    let nx = init.grid().nx;
    let mut checks = Vec::new();
    for (name, a, b) in [
        ("velocity divergence", &init.u, &init.v),
        ("magnetic divergence", &init.h, &init.g),
    ] {
        let d4 = crate::fields::divergence(a, b, 4)?;
        let d2 = crate::fields::divergence(a, b, 2)?;
        let m4 = d4.max_abs();
        let trunc = d4
            .values
            .iter()
            .zip(&d2.values)
            .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
        let tol = 10.0 * trunc + 1e-10;
        checks.push(Check {
            name,
            pass: m4 <= tol,
            measured: m4,
            margin: tol - m4,
        });
    }
    let scale = 1.0 + init.u.max_abs().max(init.h.max_abs());
    for (name, f) in [
        ("u at wall", &init.u),
        ("v at wall", &init.v),
        ("g at wall", &init.g),
    ] {
        let m = f.values[..nx].iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let tol = 1e-10 * scale;
        checks.push(Check {
            name,
            pass: m <= tol,
            measured: m,
            margin: tol - m,
        });
    }
    let hmin = init.h.values[..nx].iter().cloned().fold(f64::INFINITY, f64::min);
    checks.push(Check {
        name: "non-degenerate wall field",
        pass: delta0 > 0.0 && hmin >= delta0,
        measured: hmin,
        margin: hmin - delta0,
    });
    Ok(InitialDataReport { checks })
}

/// Rejects data failing any check, naming the failed conditions.
pub fn validate_initial_data(init: &VectorState, delta0: f64) -> Result<InitialDataReport> {
    let r = initial_data_report(init, delta0)?;
    if r.all_pass() {
        Ok(r)
    } else {
        let failed: Vec<String> = r
            .checks
            .iter()
            .filter(|c| !c.pass)
            .map(|c| format!("{} (measured {:.3e}, margin {:.3e})", c.name, c.measured, c.margin))
            .collect();
        Err(Error::InitialData(failed.join("; ")))
    }
}

/// Time-indexed inner flow on a physical grid.
#[derive(Clone, Debug)]
pub struct InnerTrajectory {
    pub grid: Arc<Grid>,
    pub times: Vec<f64>,
    pub states: Vec<VectorState>,
    /// Potentials at each stored time (for interpolation in time).
    pub kin: Vec<Vec<f64>>,
    pub dpdx_wall: Vec<Vec<f64>>,
    /// min_x h(t, x, 0) at each stored time.
    pub wall_h_min: Vec<f64>,
    /// First stored time with min_x h(t,x,0) < δ₀/2, if monitored.
    pub t1: Option<f64>,
}

pub type IdealMHDState = InnerTrajectory;

impl InnerTrajectory {
    pub fn kin_at(&self, t: f64) -> Kin {
        let v = interp(&self.times, &self.kin, t);
        Kin::from_flat(&v, self.grid.nx, self.grid.ny)
    }

    pub fn phys_at(&self, t: f64) -> Phys {
        phys(&self.grid, &self.kin_at(t))
    }

    pub fn t_end(&self) -> f64 {
        *self.times.last().unwrap()
    }

    pub fn covers(&self, t: f64) -> bool {
        t >= self.times[0] - 1e-12 && t <= self.t_end() + 1e-12
    }

    /// Largest sup-norm distance of any stored state from `reference`.
    pub fn max_drift(&self, reference: &VectorState) -> f64 {
        self.states.iter().map(|s| s.max_diff(reference)).fold(0.0, f64::max)
    }
}

#[derive(Clone, Debug)]
pub struct IdealOptions {
    /// Steps between stored snapshots.
    pub cadence: usize,
    /// Strength of the sixth-difference y-dissipation per step.
    pub filter: f64,
    /// Wall non-degeneracy level δ₀ used for validation and monitoring.
    pub delta0: Option<f64>,
}

impl Default for IdealOptions {
    fn default() -> Self {
        IdealOptions {
            cadence: 10,
            filter: 5e-4,
            delta0: None,
        }
    }
}

/// Potentials from a divergence-free state: ψ̂_k = i v̂_k/k, Â_k = i ĝ_k/k.
pub fn kin_from_state(grid: &Grid, s: &VectorState) -> Kin {
    let (nx, ny) = (grid.nx, grid.ny);
    let fr = &grid.fourier;
    let lift = |f: &[f64]| -> Vec<C> {
        let mut c = fr.forward(f);
        for (k, z) in c.iter_mut().enumerate() {
            let kk = fr.dk(k % nx);
            *z = if kk == 0.0 || !fr.kept(k % nx) {
                C::new(0.0, 0.0)
            } else {
                *z * C::new(0.0, 1.0 / kk)
            };
        }
        c
    };
    let mean = |f: &[f64]| -> Vec<f64> {
        (0..ny).map(|j| f[j * nx..(j + 1) * nx].iter().sum::<f64>() / nx as f64).collect()
    };
    Kin {
        psi: lift(&s.v.values),
        a: lift(&s.g.values),
        um: mean(&s.u.values),
        hm: mean(&s.h.values),
    }
}

pub(crate) fn state_from_eval(
    grid: &Arc<Grid>,
    ph: &Phys,
    p: Vec<f64>,
) -> VectorState {
    let f = |v: &Vec<f64>, q: &str| ScalarField {
        grid: grid.clone(),
        values: v.clone(),
        quantity: q.to_string(),
    };
    VectorState {
        u: f(&ph.u, "u"),
        v: f(&ph.v, "v"),
        h: f(&ph.h, "h"),
        g: f(&ph.g, "g"),
        p: Some(f(&p, "p")),
    }
}

/// Shared driver for the ideal and linearised solvers.
pub(crate) fn integrate(
    grid: &Arc<Grid>,
    kin0: &Kin,
    t_end: f64,
    dt: f64,
    opts: &IdealOptions,
    dynamics: Dynamics,
    wall: Wall,
    forcing: Option<Forcing>,
) -> Result<InnerTrajectory> {
    let (times, cadence) = schedule(t_end, dt, opts.cadence)?;
    let eng = Engine::new(grid, dynamics, wall, forcing, opts.filter)?;
    let mut q = eng.q_from_kin(kin0);
    let nx = grid.nx;
    let mut out = InnerTrajectory {
        grid: grid.clone(),
        times: times.clone(),
        states: Vec::new(),
        kin: Vec::new(),
        dpdx_wall: Vec::new(),
        wall_h_min: Vec::new(),
        t1: None,
    };
    let mut t = 0.0;
    for n in 0..times.len() {
        let tn = times[n];
        for step in 0..=if n + 1 < times.len() { cadence } else { 0 } {
            let ev = eng.eval(t, &q);
            if step == 0 {
                let (p, px) = eng.pressure(t, &ev);
                let st = state_from_eval(grid, &ev.phys, p);
                let hmin = st.h.values[..nx].iter().cloned().fold(f64::INFINITY, f64::min);
                if let (Some(d0), None) = (opts.delta0, out.t1) {
                    if hmin < 0.5 * d0 {
                        log::warn!("wall field min {hmin:.4} fell below delta0/2 at t={tn:.4}");
                        out.t1 = Some(tn);
                    }
                }
                out.wall_h_min.push(hmin);
                out.kin.push(ev.kin.to_flat());
                out.states.push(st);
                out.dpdx_wall.push(px);
            }
            if step == cadence || n + 1 == times.len() {
                break;
            }
            let lim = eng.step_limit(t, &ev.phys);
            if dt > lim {
                return Err(Error::Cfl { dt, limit: lim });
            }
            rk3_step(&eng, t, dt, &mut q, ev.dq)?;
            t = tn + (step + 1) as f64 * dt;
        }
        if n + 1 < times.len() {
            t = times[n + 1];
        }
    }
    Ok(out)
}

/// Solve the ideal MHD problem with impermeable, tangent-field wall.
pub fn solve_ideal_mhd(
    init: &VectorState,
    t_end: f64,
    grid: &Arc<Grid>,
    dt: f64,
) -> Result<IdealMHDState> {
    solve_ideal_mhd_with(init, t_end, grid, dt, &IdealOptions::default(), None)
}

pub fn solve_ideal_mhd_with(
    init: &VectorState,
    t_end: f64,
    grid: &Arc<Grid>,
    dt: f64,
    opts: &IdealOptions,
    forcing: Option<Forcing>,
) -> Result<IdealMHDState> {
    if !init.grid().same_shape(grid) {
        return Err(Error::Shape("initial data not on the solver grid".into()));
    }
    if let Some(d0) = opts.delta0 {
        validate_initial_data(init, d0)?;
    }
    let kin0 = kin_from_state(grid, init);
    let nx = grid.nx;
    let zero = move |_t: f64| WallPotentials::zeros(nx);
    integrate(grid, &kin0, t_end, dt, opts, Dynamics::Nonlinear, &zero, forcing)
}

/// Wall traces of the inner flows, time-indexed.
#[derive(Clone, Debug)]
pub struct BoundaryTrace {
    pub nx: usize,
    pub times: Vec<f64>,
    pub ubar: Vec<Vec<f64>>,
    pub hbar: Vec<Vec<f64>>,
    pub dpdx_wall: Vec<Vec<f64>>,
    /// ∂_y u⁰, ∂_y h⁰, ∂²_y u⁰, ∂²_y h⁰ at y = 0.
    pub uy: Vec<Vec<f64>>,
    pub hy: Vec<Vec<f64>>,
    pub uyy: Vec<Vec<f64>>,
    pub hyy: Vec<Vec<f64>>,
    pub first: Option<FirstOrderTrace>,
}

/// Wall traces of the first-order inner flow.
#[derive(Clone, Debug)]
pub struct FirstOrderTrace {
    pub ubar: Vec<Vec<f64>>,
    pub hbar: Vec<Vec<f64>>,
    pub vbar: Vec<Vec<f64>>,
    pub gbar: Vec<Vec<f64>>,
    pub uy: Vec<Vec<f64>>,
    pub hy: Vec<Vec<f64>>,
}

/// Every wall quantity the layer equations use, at one time.
/// Normal-component traces follow from the divergence constraint:
/// ∂_y v̄ = -∂_x ū and ∂²_y v̄ = -∂_x ∂_y ū, likewise for g.
#[derive(Clone, Debug)]
pub struct TraceSample {
    pub ubar: Vec<f64>,
    pub hbar: Vec<f64>,
    pub dpdx: Vec<f64>,
    pub uy: Vec<f64>,
    pub hy: Vec<f64>,
    pub ux: Vec<f64>,
    pub hx: Vec<f64>,
    pub uxy: Vec<f64>,
    pub hxy: Vec<f64>,
    pub vy: Vec<f64>,
    pub gy: Vec<f64>,
    pub vyy: Vec<f64>,
    pub gyy: Vec<f64>,
    pub vxy: Vec<f64>,
    pub gxy: Vec<f64>,
    pub first: Option<FirstSample>,
}

#[derive(Clone, Debug)]
pub struct FirstSample {
    pub ubar: Vec<f64>,
    pub hbar: Vec<f64>,
    pub vbar: Vec<f64>,
    pub gbar: Vec<f64>,
    pub hy: Vec<f64>,
    pub ux: Vec<f64>,
    pub hx: Vec<f64>,
    pub vx: Vec<f64>,
    pub gx: Vec<f64>,
    pub vy: Vec<f64>,
    pub gy: Vec<f64>,
}

impl BoundaryTrace {
    /// x- and t-independent wall data with zero derivatives and pressure gradient.
    pub fn uniform(times: &[f64], nx: usize, ubar: f64, hbar: f64) -> Self {
        let c = |v: f64| vec![vec![v; nx]; times.len()];
        BoundaryTrace {
            nx,
            times: times.to_vec(),
            ubar: c(ubar),
            hbar: c(hbar),
            dpdx_wall: c(0.0),
            uy: c(0.0),
            hy: c(0.0),
            uyy: c(0.0),
            hyy: c(0.0),
            first: None,
        }
    }

    pub fn covers(&self, t: f64) -> bool {
        t >= self.times[0] - 1e-12 && t <= self.times.last().unwrap() + 1e-12
    }

    pub fn sample(&self, t: f64) -> TraceSample {
        let (s, w, _) = cubic_weights(&self.times, t);
        let at = |ch: &[Vec<f64>]| -> Vec<f64> {
            let mut out = vec![0.0; self.nx];
            for (k, c) in w.iter().enumerate() {
                for (o, v) in out.iter_mut().zip(&ch[s + k]) {
                    *o += c * v;
                }
            }
            out
        };
        let fr = crate::fields::spectral::Fourier::new(self.nx);
        let neg = |v: Vec<f64>| v.into_iter().map(|x| -x).collect::<Vec<f64>>();
        let ubar = at(&self.ubar);
        let hbar = at(&self.hbar);
        let uy = at(&self.uy);
        let hy = at(&self.hy);
        let ux = fr.dx(&ubar);
        let hx = fr.dx(&hbar);
        let uxy = fr.dx(&uy);
        let hxy = fr.dx(&hy);
        let vy = neg(ux.clone());
        let gy = neg(hx.clone());
        let first = self.first.as_ref().map(|f| {
            let ubar1 = at(&f.ubar);
            let hbar1 = at(&f.hbar);
            let vbar1 = at(&f.vbar);
            let gbar1 = at(&f.gbar);
            let ux1 = fr.dx(&ubar1);
            let hx1 = fr.dx(&hbar1);
            FirstSample {
                vx: fr.dx(&vbar1),
                gx: fr.dx(&gbar1),
                vy: neg(ux1.clone()),
                gy: neg(hx1.clone()),
                hy: at(&f.hy),
                ux: ux1,
                hx: hx1,
                ubar: ubar1,
                hbar: hbar1,
                vbar: vbar1,
                gbar: gbar1,
            }
        });
        TraceSample {
            dpdx: at(&self.dpdx_wall),
            vyy: neg(uxy.clone()),
            gyy: neg(hxy.clone()),
            vxy: fr.dx(&vy),
            gxy: fr.dx(&gy),
            ubar,
            hbar,
            uy,
            hy,
            ux,
            hx,
            uxy,
            hxy,
            vy,
            gy,
            first,
        }
    }

    pub fn is_finite(&self) -> bool {
        [&self.ubar, &self.hbar, &self.dpdx_wall, &self.uy, &self.hy]
            .iter()
            .all(|c| c.iter().flatten().all(|v| v.is_finite()))
    }
}

/// Wall rows of u, h and the one-sided derivatives of u, h at y = 0.
pub fn extract_trace(traj: &IdealMHDState) -> BoundaryTrace {
    let g = &traj.grid;
    let nx = g.nx;
    let rows = |f: &dyn Fn(&VectorState) -> Vec<f64>| traj.states.iter().map(f).collect();
    let d1 = |f: &ScalarField| -> Vec<f64> { (0..nx).map(|i| g.d1().at(&f.values, nx, i, 0)).collect() };
    let d2 = |f: &ScalarField| -> Vec<f64> { (0..nx).map(|i| g.d2().at(&f.values, nx, i, 0)).collect() };
    BoundaryTrace {
        nx,
        times: traj.times.clone(),
        ubar: rows(&|s| s.u.values[..nx].to_vec()),
        hbar: rows(&|s| s.h.values[..nx].to_vec()),
        dpdx_wall: traj.dpdx_wall.clone(),
        uy: rows(&|s| d1(&s.u)),
        hy: rows(&|s| d1(&s.h)),
        uyy: rows(&|s| d2(&s.u)),
        hyy: rows(&|s| d2(&s.h)),
        first: None,
    }
}

/// Attach the wall traces of the first-order inner flow.
pub fn attach_first_order(trace: &mut BoundaryTrace, inner1: &InnerTrajectory) {
    let g = &inner1.grid;
    let nx = g.nx;
    let rows = |f: &dyn Fn(&VectorState) -> Vec<f64>| inner1.states.iter().map(f).collect();
    let d1 = |f: &ScalarField| -> Vec<f64> { (0..nx).map(|i| g.d1().at(&f.values, nx, i, 0)).collect() };
    trace.first = Some(FirstOrderTrace {
        ubar: rows(&|s| s.u.values[..nx].to_vec()),
        hbar: rows(&|s| s.h.values[..nx].to_vec()),
        vbar: rows(&|s| s.v.values[..nx].to_vec()),
        gbar: rows(&|s| s.g.values[..nx].to_vec()),
        uy: rows(&|s| d1(&s.u)),
        hy: rows(&|s| d1(&s.h)),
    });
}
