//! Viscous resistive MHD in the half-channel with a no-slip, perfectly
//! conducting wall: u = v = 0, ∂_y h = 0, g = 0 at y = 0.
//!
//! Velocity and magnetic field are carried as stream and flux functions per
//! nonzero x-mode plus the x-means of u and h, as in the ideal solvers, so
//! both fields are discretely divergence-free. Each SMR RK3 stage treats
//! transport explicitly and diffusion with the stage's Crank-Nicolson split,
//! solving one banded system per mode with the wall conditions as rows.
//! The top of the box is a free-slip, conducting lid: v = ω = 0, g = 0.

use crate::error::{Error, Result};
use crate::fields::banded::{BandLu, BandMatrix};
use crate::fields::fd::{fornberg, FdOp, Stencil};
use crate::fields::time::cubic_weights;
use crate::fields::{Grid, ScalarField, VectorState};
use crate::inner0::{initial_data_report, kin_from_state, InnerTrajectory};
use crate::potential::{advective_limit, bilinear, phys, schedule, Kin, Phys, RK_ALPHA, RK_GAMMA, RK_ZETA};
use num_complex::Complex64 as C;
use std::sync::Arc;

/// Temporal order of the IMEX scheme (set by the Crank-Nicolson diffusion split).
pub const SCHEME_ORDER: f64 = 2.0;

#[derive(Clone, Debug, PartialEq)]
pub struct ViscousParams {
    pub eps: f64,
    pub mu: f64,
    pub kappa: f64,
    pub t_end: f64,
    pub dt: f64,
    /// Steps between stored snapshots.
    pub cadence: usize,
}

impl ViscousParams {
    pub fn new(eps: f64, mu: f64, kappa: f64, t_end: f64, dt: f64) -> Result<Self> {
        if !(eps > 0.0 && eps <= 1.0) {
            return Err(Error::Config(format!("eps={eps} must lie in (0, 1]")));
        }
        for (name, v) in [("mu", mu), ("kappa", kappa), ("t_end", t_end), ("dt", dt)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name}={v} must be positive")));
            }
        }
        Ok(ViscousParams { eps, mu, kappa, t_end, dt, cadence: 10 })
    }

    pub fn with_cadence(self, cadence: usize) -> Self {
        ViscousParams { cadence, ..self }
    }

    /// Δy₀ ≤ √ε/4: the first cell must resolve the O(√ε) layer.
    pub fn check_gate(&self, grid: &Grid) -> Result<()> {
        let required = self.eps.sqrt() / 4.0;
        let dy0 = grid.dy0();
        if dy0 > required {
            return Err(Error::Gate { dy0, required });
        }
        Ok(())
    }
}

fn unit(j: usize) -> Stencil {
    Stencil { start: j, w: vec![1.0] }
}

/// Linear combination of row stencils.
fn combine(terms: &[(f64, &Stencil)]) -> Stencil {
    let start = terms.iter().map(|(_, s)| s.start).min().unwrap_or(0);
    let end = terms.iter().map(|(_, s)| s.start + s.w.len()).max().unwrap_or(0);
    let mut w = vec![0.0; end - start];
    for (c, s) in terms {
        for (m, v) in s.w.iter().enumerate() {
            w[s.start + m - start] += c * v;
        }
    }
    Stencil { start, w }
}

/// Row `j` of the product a·b.
fn compose(a: &FdOp, b: &FdOp, j: usize) -> Stencil {
    let s = &a.rows[j];
    let terms: Vec<(f64, &Stencil)> = s.w.iter().enumerate().map(|(m, &w)| (w, &b.rows[s.start + m])).collect();
    combine(&terms)
}

fn dot<T>(s: &Stencil, f: &[T]) -> T
where
    T: Copy + std::ops::Add<Output = T> + std::ops::Mul<f64, Output = T> + Default,
{
    s.w.iter().enumerate().fold(T::default(), |acc, (m, &w)| acc + f[s.start + m] * w)
}

fn factor(rows: &[Stencil]) -> Result<BandLu> {
    let n = rows.len();
    let kl = rows.iter().enumerate().map(|(j, s)| j.saturating_sub(s.start)).max().unwrap_or(0);
    let ku = rows.iter().enumerate().map(|(j, s)| (s.start + s.w.len() - 1).saturating_sub(j)).max().unwrap_or(0);
    let mut m = BandMatrix::zeros(n, kl, ku);
    for (j, s) in rows.iter().enumerate() {
        for (c, &w) in s.w.iter().enumerate() {
            m.add(j, s.start + c, w);
        }
    }
    m.factor()
}

/// Which rows of a column carry the equation; the rest are boundary rows.
#[derive(Clone, Copy)]
struct Interior {
    first: usize,
    last: usize,
}

/// One implicit system per RK stage: the stage matrix (boundary rows
/// included) and the explicit operator applied to the previous stage.
struct Column {
    eq: Interior,
    lhs: [BandLu; 3],
    /// M and Op rows on the equation rows: RHS = M x + a Op x + forcing.
    mass: Vec<Stencil>,
    op: Vec<Stencil>,
    coef: [f64; 3],
}

impl Column {
    fn new(
        n: usize,
        boundary: &[(usize, Stencil)],
        eq: Interior,
        mass: Vec<Stencil>,
        op: Vec<Stencil>,
        nu: f64,
        dt: f64,
    ) -> Result<Column> {
        let coef = RK_ALPHA.map(|a| a * dt * nu);
        let build = |a: f64| -> Result<BandLu> {
            let mut rows: Vec<Stencil> = (0..n).map(unit).collect();
            for (r, s) in boundary {
                rows[*r] = s.clone();
            }
            for j in eq.first..=eq.last {
                rows[j] = combine(&[(1.0, &mass[j - eq.first]), (-a, &op[j - eq.first])]);
            }
            factor(&rows)
        };
        Ok(Column { eq, lhs: [build(coef[0])?, build(coef[1])?, build(coef[2])?], mass, op, coef })
    }

    /// Advance one column through stage `s` with the explicit increment `inc`
    /// (already multiplied by Δt) given on the equation rows.
    fn stage(&self, s: usize, x: &mut [f64], inc: &[f64]) {
        let n = x.len();
        let mut rhs = vec![0.0; n];
        for j in self.eq.first..=self.eq.last {
            let r = j - self.eq.first;
            rhs[j] = dot(&self.mass[r], x) + self.coef[s] * dot(&self.op[r], x) + inc[j];
        }
        self.lhs[s].solve_in_place(&mut rhs);
        x.copy_from_slice(&rhs);
    }
}

/// Explicit stage forcing: ∂_t of (∇²ψ, A) per mode and of the means.
struct Forcing {
    psi: Vec<C>,
    a: Vec<C>,
    um: Vec<f64>,
    hm: Vec<f64>,
}

struct Solver<'a> {
    grid: &'a Grid,
    /// Per |k| ≥ 1: stream and flux function columns.
    psi: Vec<Option<Column>>,
    a: Vec<Option<Column>>,
    um: Column,
    hm: Column,
}

impl<'a> Solver<'a> {
    fn new(grid: &'a Grid, p: &ViscousParams) -> Result<Self> {
        let n = grid.ny;
        let (d1, d2) = (grid.d1(), grid.d2());
        let fr = &grid.fourier;
        let kmax = (0..grid.nx).filter(|&i| fr.kept(i)).map(|i| fr.wavenumber(i).abs() as usize).max().unwrap_or(0);
        let d2d2: Vec<Stencil> = (0..n).map(|j| compose(d2, d2, j)).collect();
        let d1d1_wall = compose(d1, d1, 0);
        let (nu, ka) = (p.mu * p.eps, p.kappa * p.eps);
        let mut psi = vec![None];
        let mut a = vec![None];
        for k in 1..=kmax {
            let k2 = (k * k) as f64;
            let l = |j: usize| combine(&[(1.0, &d2.rows[j]), (-k2, &unit(j))]);
            let ll = |j: usize| combine(&[(1.0, &d2d2[j]), (-2.0 * k2, &d2.rows[j]), (k2 * k2, &unit(j))]);
            // ψ = ∂_yψ = 0 at the wall; ψ = ∂²_yψ = 0 at the lid.
            let eq = Interior { first: 2, last: n - 3 };
            let boundary = [(0, unit(0)), (1, d1.rows[0].clone()), (n - 2, d2.rows[n - 1].clone()), (n - 1, unit(n - 1))];
            psi.push(Some(Column::new(
                n,
                &boundary,
                eq,
                (eq.first..=eq.last).map(l).collect(),
                (eq.first..=eq.last).map(ll).collect(),
                nu,
                p.dt,
            )?));
            // A = 0 (g = 0) and ∂_y h = 0 at the wall; A = 0 at the lid.
            let eq = Interior { first: 2, last: n - 2 };
            let boundary = [(0, unit(0)), (1, d1d1_wall.clone()), (n - 1, unit(n - 1))];
            a.push(Some(Column::new(
                n,
                &boundary,
                eq,
                (eq.first..=eq.last).map(unit).collect(),
                (eq.first..=eq.last).map(l).collect(),
                ka,
                p.dt,
            )?));
        }
        let eq = Interior { first: 1, last: n - 2 };
        let ids: Vec<Stencil> = (1..n - 1).map(unit).collect();
        let lap: Vec<Stencil> = (1..n - 1).map(|j| d2.rows[j].clone()).collect();
        let um = Column::new(n, &[(0, unit(0)), (n - 1, d1.rows[n - 1].clone())], eq, ids.clone(), lap.clone(), nu, p.dt)?;
        let hm = Column::new(n, &[(0, d1.rows[0].clone()), (n - 1, d1.rows[n - 1].clone())], eq, ids, lap, ka, p.dt)?;
        Ok(Solver { grid, psi, a, um, hm })
    }

    fn forcing(&self, kin: &Kin) -> (Forcing, Phys) {
        let g = self.grid;
        let (nx, ny) = (g.nx, g.ny);
        let fr = &g.fourier;
        let ph = phys(g, kin);
        let [nu, nv, na] = bilinear(&ph, &ph);
        let spec = |f: &[f64]| {
            let mut c = fr.forward(f);
            fr.dealias(&mut c);
            c
        };
        let (nuh, nvh, mut nah) = (spec(&nu), spec(&nv), spec(&na));
        let dnu = g.d1().apply(&nuh, nx);
        let zero = C::new(0.0, 0.0);
        let mut psi = vec![zero; nx * ny];
        for j in 0..ny {
            for i in 1..nx {
                let q = i + nx * j;
                // ∂_t∇²ψ = −∂_t ω = ∂_y N_u − ik N_v.
                psi[q] = dnu[q] - nvh[q] * C::new(0.0, fr.dk(i));
            }
        }
        let um = (0..ny).map(|j| nuh[nx * j].re).collect();
        let na0: Vec<f64> = (0..ny).map(|j| nah[nx * j].re).collect();
        let hm = g.d1().apply_col(&na0);
        for j in 0..ny {
            nah[nx * j] = zero;
        }
        (Forcing { psi, a: nah, um, hm }, ph)
    }

    fn step(&self, kin: &mut Kin, f0: Forcing, dt: f64) -> Result<()> {
        let g = self.grid;
        let (nx, ny) = (g.nx, g.ny);
        let fr = &g.fourier;
        let mut prev: Option<Forcing> = None;
        let mut f = f0;
        for s in 0..3 {
            if s > 0 {
                f = self.forcing(kin).0;
            }
            let inc = |now: f64, before: Option<f64>| dt * (RK_GAMMA[s] * now + before.map_or(0.0, |b| RK_ZETA[s] * b));
            let col_inc = |field: &dyn Fn(&Forcing, usize) -> f64| -> Vec<f64> {
                (0..ny).map(|j| inc(field(&f, j), prev.as_ref().map(|p| field(p, j)))).collect()
            };
            for i in 1..nx {
                if !fr.kept(i) {
                    continue;
                }
                let k = fr.wavenumber(i).abs() as usize;
                for (which, col) in [(0usize, &self.psi[k]), (1, &self.a[k])] {
                    let col = col.as_ref().expect("kept mode has a column");
                    let data = if which == 0 { &mut kin.psi } else { &mut kin.a };
                    for part in 0..2 {
                        let pick = |z: C| if part == 0 { z.re } else { z.im };
                        let src = |fc: &Forcing, j: usize| pick(if which == 0 { fc.psi[i + nx * j] } else { fc.a[i + nx * j] });
                        let mut x: Vec<f64> = (0..ny).map(|j| pick(data[i + nx * j])).collect();
                        col.stage(s, &mut x, &col_inc(&src));
                        for j in 0..ny {
                            let z = &mut data[i + nx * j];
                            if part == 0 {
                                z.re = x[j];
                            } else {
                                z.im = x[j];
                            }
                        }
                    }
                }
            }
            self.um.stage(s, &mut kin.um, &col_inc(&|fc: &Forcing, j| fc.um[j]));
            self.hm.stage(s, &mut kin.hm, &col_inc(&|fc: &Forcing, j| fc.hm[j]));
            // The wall rows are identities with zero data.
            for i in 0..nx {
                kin.psi[i] = C::new(0.0, 0.0);
                kin.a[i] = C::new(0.0, 0.0);
            }
            kin.um[0] = 0.0;
            prev = Some(f);
            f = Forcing { psi: Vec::new(), a: Vec::new(), um: Vec::new(), hm: Vec::new() };
        }
        let finite = kin.psi.iter().chain(&kin.a).all(|z| z.re.is_finite() && z.im.is_finite())
            && kin.um.iter().chain(&kin.hm).all(|v| v.is_finite());
        if !finite {
            return Err(Error::Blowup { time: f64::NAN });
        }
        Ok(())
    }
}

fn to_state(grid: &Arc<Grid>, ph: &Phys) -> VectorState {
    let f = |v: &Vec<f64>, q: &str| ScalarField { grid: grid.clone(), values: v.clone(), quantity: q.to_string() };
    // The implicit solve imposes these wall values; evaluating D1 ψ there only adds roundoff.
    let wall = |v: &Vec<f64>| {
        let mut w = v.clone();
        w[..grid.nx].iter_mut().for_each(|x| *x = 0.0);
        w
    };
    let (u, v, g) = (wall(&ph.u), wall(&ph.v), wall(&ph.g));
    VectorState { u: f(&u, "u"), v: f(&v, "v"), h: f(&ph.h, "h"), g: f(&g, "g"), p: None }
}

/// Solve from `init` up to `params.t_end`, storing every `cadence` steps.
/// The returned states carry no pressure.
pub fn solve_viscous_mhd(init: &VectorState, params: &ViscousParams, grid: &Arc<Grid>) -> Result<InnerTrajectory> {
    params.check_gate(grid)?;
    if !init.grid().same_shape(grid) {
        return Err(Error::Shape("initial data not on the solver grid".into()));
    }
    let report = initial_data_report(init, 1.0)?;
    let failed: Vec<String> = report
        .checks
        .iter()
        .filter(|c| !c.pass && c.name != "non-degenerate wall field")
        .map(|c| format!("{} (measured {:.3e})", c.name, c.measured))
        .collect();
    if !failed.is_empty() {
        return Err(Error::InitialData(failed.join("; ")));
    }
    let (times, cadence) = schedule(params.t_end, params.dt, params.cadence)?;
    let solver = Solver::new(grid, params)?;
    let mut kin = kin_from_state(grid, init);
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
    for n in 0..times.len() {
        let steps = if n + 1 < times.len() { cadence } else { 0 };
        for step in 0..=steps {
            let (f, ph) = solver.forcing(&kin);
            if step == 0 {
                let st = to_state(grid, &ph);
                out.wall_h_min.push(st.h.values[..nx].iter().cloned().fold(f64::INFINITY, f64::min));
                out.kin.push(kin.to_flat());
                out.dpdx_wall.push(Vec::new());
                out.states.push(st);
            }
            if step == steps {
                break;
            }
            let limit = advective_limit(grid, &ph);
            if params.dt > limit {
                return Err(Error::Cfl { dt: params.dt, limit });
            }
            let t = times[n] + step as f64 * params.dt;
            solver.step(&mut kin, f, params.dt).map_err(|_| Error::Blowup { time: t + params.dt })?;
        }
    }
    Ok(out)
}

/// Discrete energy law d/dt ½‖(u,v,h,g)‖² + ε(μ‖∇u‖² + κ‖∇H‖²) = 0 checked
/// between consecutive snapshots.
#[derive(Clone, Debug)]
pub struct EnergyBudget {
    pub times: Vec<f64>,
    pub energy: Vec<f64>,
    pub dissipation: Vec<f64>,
    /// (ΔE + ∫D dt) / max(|ΔE|, ∫D dt) per interval; 0 when nothing moves.
    pub residual: Vec<f64>,
    /// Largest |residual|.
    pub max_relative: f64,
}

/// Fourth-order y-quadrature weights: each interval integrates the cubic
/// through its four nearest nodes with two-point Gauss-Legendre.
fn quadrature_weights(y: &[f64]) -> Vec<f64> {
    let n = y.len();
    let mut w = vec![0.0; n];
    if n < 4 {
        for j in 0..n - 1 {
            w[j] += 0.5 * (y[j + 1] - y[j]);
            w[j + 1] += 0.5 * (y[j + 1] - y[j]);
        }
        return w;
    }
    let r = 0.5 / 3f64.sqrt();
    for j in 0..n - 1 {
        let s = j.saturating_sub(1).min(n - 4);
        let (a, b) = (y[j], y[j + 1]);
        for z in [0.5 * (a + b) - r * (b - a), 0.5 * (a + b) + r * (b - a)] {
            let l = &fornberg(z, &y[s..s + 4], 0)[0];
            for k in 0..4 {
                w[s + k] += 0.5 * (b - a) * l[k];
            }
        }
    }
    w
}

/// Energy and dissipation from independent norm evaluations of the stored
/// snapshots; ∫D dt uses the cubic through the four nearest snapshots.
pub fn energy_budget(traj: &InnerTrajectory, params: &ViscousParams) -> EnergyBudget {
    let g = &traj.grid;
    let nx = g.nx;
    let fr = &g.fourier;
    let wy = quadrature_weights(&g.y);
    let sq = |f: &[f64]| {
        let s: f64 = wy.iter().enumerate().map(|(j, w)| w * f[j * nx..(j + 1) * nx].iter().map(|v| v * v).sum::<f64>()).sum();
        s * g.dx()
    };
    let grad = |f: &[f64]| sq(&fr.dx(f)) + sq(&g.d1().apply(f, nx));
    let energy: Vec<f64> = traj
        .states
        .iter()
        .map(|s| 0.5 * (sq(&s.u.values) + sq(&s.v.values) + sq(&s.h.values) + sq(&s.g.values)))
        .collect();
    let dissipation: Vec<f64> = traj
        .states
        .iter()
        .map(|s| {
            params.eps
                * (params.mu * (grad(&s.u.values) + grad(&s.v.values)) + params.kappa * (grad(&s.h.values) + grad(&s.g.values)))
        })
        .collect();
    let ts = &traj.times;
    let series: Vec<Vec<f64>> = dissipation.iter().map(|d| vec![*d]).collect();
    // Three-point Gauss-Legendre is exact for the cubic interpolant.
    let gl = [(-(0.6f64).sqrt(), 5.0 / 9.0), (0.0, 8.0 / 9.0), ((0.6f64).sqrt(), 5.0 / 9.0)];
    let mut residual = Vec::new();
    for n in 0..ts.len().saturating_sub(1) {
        let (a, b) = (ts[n], ts[n + 1]);
        let integral = if ts.len() >= 4 {
            gl.iter()
                .map(|(x, w)| {
                    let t = 0.5 * (a + b) + 0.5 * (b - a) * x;
                    let (s, wt, _) = cubic_weights(ts, t);
                    w * 0.5 * (b - a) * (0..wt.len()).map(|k| wt[k] * series[s + k][0]).sum::<f64>()
                })
                .sum::<f64>()
        } else {
            0.5 * (b - a) * (dissipation[n] + dissipation[n + 1])
        };
        let de = energy[n + 1] - energy[n];
        // Changes at roundoff of the stored energy count as no motion.
        let floor = 64.0 * f64::EPSILON * energy[n].max(energy[n + 1]);
        let scale = de.abs().max(integral);
        residual.push(if scale > floor { (de + integral) / scale } else { 0.0 });
    }
    let max_relative = residual.iter().fold(0.0f64, |m, r| m.max(r.abs()));
    EnergyBudget { times: ts.clone(), energy, dissipation, residual, max_relative }
}

/// Observed order of the Δt-dependent part of the budget from three runs at
/// Δt, Δt/2, Δt/4 with the same snapshot times. The spatial part of the
/// residual does not depend on Δt and cancels in the differences.
pub fn budget_order(coarse: &EnergyBudget, mid: &EnergyBudget, fine: &EnergyBudget) -> Result<f64> {
    if coarse.times != mid.times || mid.times != fine.times {
        return Err(Error::TimeWindow("budgets must share snapshot times".into()));
    }
    let gap = |a: &EnergyBudget, b: &EnergyBudget| {
        a.residual.iter().zip(&b.residual).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
    };
    let (d1, d2) = (gap(coarse, mid), gap(mid, fine));
    if d1 == 0.0 || d2 == 0.0 {
        return Err(Error::Fit("budget residual does not change with the step".into()));
    }
    Ok((d1 / d2).log2())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::Stretching;
    use crate::inner0::{Preset, WaveSpec};

    #[test]
    fn quadrature_is_exact_on_cubics() {
        let g = grid();
        let w = quadrature_weights(&g.y);
        let f = |y: f64| 2.0 - y + 0.5 * y * y - 0.1 * y * y * y;
        let l = g.y[g.ny - 1];
        let exact = 2.0 * l - 0.5 * l * l + l.powi(3) / 6.0 - 0.025 * l.powi(4);
        let num: f64 = w.iter().zip(&g.y).map(|(w, y)| w * f(*y)).sum();
        assert!((num - exact).abs() <= 1e-11 * exact.abs(), "{num} vs {exact}");
    }

    fn grid() -> Arc<Grid> {
        Grid::physical(16, 128, 8.0, Stretching::Tanh { beta: 3.0 }).unwrap()
    }

    fn wave(g: &Arc<Grid>) -> VectorState {
        Preset::NumericalInner(WaveSpec { u_amp: 0.1, h_base: 1.0, h_amp: 0.1 }).initial_state(g)
    }

    fn wall_max(f: &ScalarField) -> f64 {
        f.values[..f.grid.nx].iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    #[test]
    fn uniform_field_is_steady() {
        let g = grid();
        let init = Preset::UniformField { c: 1.0 }.initial_state(&g);
        let p = ViscousParams::new(1e-2, 1.0, 1.0, 0.5, 0.005).unwrap();
        let tr = solve_viscous_mhd(&init, &p, &g).unwrap();
        assert!(tr.max_drift(&init) <= 1e-10);
        let b = energy_budget(&tr, &p);
        assert_eq!(b.max_relative, 0.0);
    }

    #[test]
    fn zero_data_stays_zero() {
        let g = grid();
        let init = Preset::UniformField { c: 0.0 }.initial_state(&g);
        let p = ViscousParams::new(1e-2, 1.0, 1.0, 0.1, 0.005).unwrap();
        let tr = solve_viscous_mhd(&init, &p, &g).unwrap();
        assert!(tr.states.iter().all(|s| s.max_diff(&init) == 0.0));
    }

    #[test]
    fn gate_refuses_coarse_wall_cell() {
        let g = Grid::physical(16, 32, 8.0, Stretching::Tanh { beta: 1.0 }).unwrap();
        let p = ViscousParams::new(1e-4, 1.0, 1.0, 0.1, 0.005).unwrap();
        match solve_viscous_mhd(&wave(&g), &p, &g) {
            Err(Error::Gate { dy0, required }) => {
                assert!((required - 0.0025).abs() < 1e-15);
                assert!(dy0 > required);
            }
            other => panic!("expected gate failure, got {other:?}"),
        }
        assert!(ViscousParams::new(0.0, 1.0, 1.0, 0.1, 0.01).is_err());
        assert!(ViscousParams::new(1e-2, -1.0, 1.0, 0.1, 0.01).is_err());
    }

    #[test]
    fn boundary_conditions_and_divergence() {
        let g = grid();
        let p = ViscousParams::new(1e-2, 1.0, 1.0, 0.1, 0.002).unwrap();
        let tr = solve_viscous_mhd(&wave(&g), &p, &g).unwrap();
        for s in &tr.states[1..] {
            assert!(wall_max(&s.u) == 0.0 && wall_max(&s.v) == 0.0 && wall_max(&s.g) == 0.0);
            let hy = crate::fields::ddy(&s.h, 4).unwrap();
            assert!(wall_max(&hy) <= 1e-10);
            assert!(s.div_velocity(4).unwrap().max_abs() <= 1e-10);
            assert!(s.div_magnetic(4).unwrap().max_abs() <= 1e-10);
        }
    }

    #[test]
    fn step_self_convergence() {
        let g = grid();
        let run = |dt: f64| {
            let p = ViscousParams::new(1e-2, 1.0, 1.0, 0.2, dt).unwrap().with_cadence((0.02 / dt).round() as usize);
            solve_viscous_mhd(&wave(&g), &p, &g).unwrap().states.pop().unwrap()
        };
        let (a, b, c) = (run(0.004), run(0.002), run(0.001));
        let order = (a.max_diff(&b) / b.max_diff(&c)).log2();
        assert!((order - SCHEME_ORDER).abs() <= 0.3, "observed order {order}");
    }

    #[test]
    fn energy_budget_closes_and_converges() {
        let g = grid();
        let budget = |dt: f64| {
            let p = ViscousParams::new(1e-2, 1.0, 1.0, 0.2, dt).unwrap().with_cadence((0.02 / dt).round() as usize);
            let tr = solve_viscous_mhd(&wave(&g), &p, &g).unwrap();
            energy_budget(&tr, &p)
        };
        let (a, b, c) = (budget(0.004), budget(0.002), budget(0.001));
        for x in [&a, &b, &c] {
            assert!(x.max_relative <= 1e-4, "{}", x.max_relative);
            assert!(x.dissipation.iter().all(|d| *d >= 0.0));
            assert!(x.energy.windows(2).all(|w| w[1] <= w[0]));
        }
        let p = budget_order(&a, &b, &c).unwrap();
        assert!((p - SCHEME_ORDER).abs() <= 0.3, "budget order {p}");
    }
}
