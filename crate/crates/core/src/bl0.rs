//! Leading-order MHD boundary layer: the Prandtl-type system for (u^p, h^p)
//! in the fast variable η, the decayed profiles, and their consistency checks.

use crate::error::{Error, Result};
use crate::fields::time::{interp, time_derivative};
use crate::fields::{cumulative_integral_raw, l2_raw, tail_integral_raw, Grid};
use crate::inner0::BoundaryTrace;
use crate::layer::{d_eta, d_eta_upwind, march, Bc, ColumnImex, Diffusion};
use std::sync::Arc;

/// Viscosity and resistivity of the layer problems.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LayerParams {
    pub mu: f64,
    pub kappa: f64,
}

impl Default for LayerParams {
    fn default() -> Self {
        LayerParams { mu: 1.0, kappa: 1.0 }
    }
}

#[derive(Clone, Debug)]
pub struct BLState0 {
    pub grid: Arc<Grid>,
    pub params: LayerParams,
    pub delta0: f64,
    pub times: Vec<f64>,
    pub up: Vec<Vec<f64>>,
    pub vp: Vec<Vec<f64>>,
    pub hp: Vec<Vec<f64>>,
    pub gp: Vec<Vec<f64>>,
    /// min over (x, η) of h^p at each stored time.
    pub hp_min: Vec<f64>,
}

impl BLState0 {
    /// Largest far-field mismatch |u^p(Lη) − ū⁰|, |h^p(Lη) − h̄⁰| over stored times.
    pub fn far_field_mismatch(&self, trace: &BoundaryTrace) -> f64 {
        let nx = self.grid.nx;
        let top = nx * (self.grid.ny - 1);
        let mut m = 0.0f64;
        for (n, &t) in self.times.iter().enumerate() {
            let s = trace.sample(t);
            for i in 0..nx {
                m = m.max((self.up[n][top + i] - s.ubar[i]).abs());
                m = m.max((self.hp[n][top + i] - s.hbar[i]).abs());
            }
        }
        m
    }
}

fn normal_components(grid: &Grid, u: &[f64], h: &[f64]) -> [Vec<f64>; 4] {
    let fr = &grid.fourier;
    let ux = fr.dx(u);
    let hx = fr.dx(h);
    let v: Vec<f64> = cumulative_integral_raw(&ux, grid).into_iter().map(|x| -x).collect();
    let g: Vec<f64> = cumulative_integral_raw(&hx, grid).into_iter().map(|x| -x).collect();
    [ux, hx, v, g]
}

/// Solve the layer system from (u^p, h^p)|_{t=0} = (ū⁰, h̄⁰)(0, x) up to `t_end`,
/// storing the state at the trace's times.
pub fn solve_bl0(
    trace: &BoundaryTrace,
    delta0: f64,
    t_end: f64,
    grid: &Arc<Grid>,
    dt: f64,
    params: LayerParams,
) -> Result<BLState0> {
    if grid.nx != trace.nx {
        return Err(Error::Shape(format!("layer nx {} vs trace nx {}", grid.nx, trace.nx)));
    }
    if !trace.covers(t_end) || trace.times[0].abs() > 1e-12 {
        return Err(Error::TimeWindow(format!(
            "trace covers [{}, {}], need [0, {t_end}]",
            trace.times[0],
            trace.times.last().unwrap()
        )));
    }
    let times: Vec<f64> = trace.times.iter().cloned().filter(|&t| t <= t_end + 1e-12).collect();
    let (nx, n) = (grid.nx, grid.ny);
    let h = grid.deta();
    let s0 = trace.sample(0.0);
    let h0min = s0.hbar.iter().cloned().fold(f64::INFINITY, f64::min);
    if h0min < delta0 - 1e-12 * delta0.abs().max(1.0) {
        return Err(Error::InitialData(format!(
            "wall field min {h0min:.4} below delta0 {delta0}"
        )));
    }
    let fr = &grid.fourier;
    let mut st = vec![vec![0.0; nx * n], vec![0.0; nx * n]];
    for j in 0..n {
        st[0][nx * j..nx * (j + 1)].copy_from_slice(&s0.ubar);
        st[1][nx * j..nx * (j + 1)].copy_from_slice(&s0.hbar);
    }
    let mut imex = ColumnImex::new(
        nx,
        n,
        h,
        vec![
            Diffusion { nu: params.mu, bottom: Bc::Dirichlet, top: Bc::Dirichlet },
            Diffusion { nu: params.kappa, bottom: Bc::Neumann, top: Bc::Dirichlet },
        ],
    );
    let kmax = (nx / 3) as f64;
    let mut explicit = |t: f64, s: &[Vec<f64>]| -> Result<Vec<Vec<f64>>> {
        let (u, hh) = (&s[0], &s[1]);
        let [ux, hx, v, g] = normal_components(grid, u, hh);
        let uv = d_eta_upwind(u, &v, nx, h);
        let hv = d_eta_upwind(hh, &v, nx, h);
        let ug = d_eta(u, nx, h);
        let hg = d_eta(hh, nx, h);
        let px = trace.sample(t).dpdx;
        let mut nu = vec![0.0; nx * n];
        let mut nh = vec![0.0; nx * n];
        for k in 0..nx * n {
            nu[k] = -(u[k] * ux[k] + v[k] * uv[k]) + (hh[k] * hx[k] + g[k] * hg[k]) - px[k % nx];
            nh[k] = -(u[k] * hx[k] + v[k] * hv[k]) + (hh[k] * ux[k] + g[k] * ug[k]);
        }
        Ok(vec![fr.dealias_real(&nu), fr.dealias_real(&nh)])
    };
    let bc = |t: f64| {
        let s = trace.sample(t);
        vec![(vec![0.0; nx], s.ubar), (vec![0.0; nx], s.hbar)]
    };
    let mut out = BLState0 {
        grid: grid.clone(),
        params,
        delta0,
        times: times.clone(),
        up: Vec::new(),
        vp: Vec::new(),
        hp: Vec::new(),
        gp: Vec::new(),
        hp_min: Vec::new(),
    };
    let limit = |st: &[Vec<f64>]| {
        let [_, _, v, g] = normal_components(grid, &st[0], &st[1]);
        let sx = st[0].iter().zip(&st[1]).fold(0.0f64, |a, (u, b)| a.max(u.abs() + b.abs()));
        let sy = v.iter().zip(&g).fold(0.0f64, |a, (p, q)| a.max(p.abs() + q.abs()));
        1.5 / (sx * kmax + sy / h).max(1e-300)
    };
    let mut after = |t: f64, st: &[Vec<f64>]| -> Result<()> {
        let (k, hmin) = st[1]
            .iter()
            .enumerate()
            .fold((0, f64::INFINITY), |a, (k, &v)| if v < a.1 { (k, v) } else { a });
        if hmin < 0.5 * delta0 {
            return Err(Error::Positivity {
                time: t,
                ix: k % nx,
                ieta: k / nx,
                value: hmin,
                bound: 0.5 * delta0,
            });
        }
        Ok(())
    };
    let mut record = |st: &[Vec<f64>]| {
        let [_, _, v, g] = normal_components(grid, &st[0], &st[1]);
        out.up.push(st[0].clone());
        out.hp.push(st[1].clone());
        out.vp.push(v);
        out.gp.push(g);
        out.hp_min.push(st[1].iter().cloned().fold(f64::INFINITY, f64::min));
    };
    march(&times, dt, &mut imex, &mut st, &mut explicit, &bc, &limit, &mut after, &mut record)?;
    Ok(out)
}

/// Decayed zeroth-order layer profile.
#[derive(Clone, Debug)]
pub struct BLProfile0 {
    pub grid: Arc<Grid>,
    pub times: Vec<f64>,
    pub ub: Vec<Vec<f64>>,
    pub vb: Vec<Vec<f64>>,
    pub hb: Vec<Vec<f64>>,
    pub gb: Vec<Vec<f64>>,
    /// v_b⁰(t, x, 0) and g_b⁰(t, x, 0).
    pub vb_wall: Vec<Vec<f64>>,
    pub gb_wall: Vec<Vec<f64>>,
    /// Max defect of v_b⁰ = v^p + η∂_xū⁰ + v_b⁰|_{η=0} (and its magnetic twin) per time.
    pub def_vg_residual: Vec<f64>,
}

/// Profile fields at one time.
#[derive(Clone, Debug)]
pub struct Profile0Sample {
    pub ub: Vec<f64>,
    pub vb: Vec<f64>,
    pub hb: Vec<f64>,
    pub gb: Vec<f64>,
    pub vb_wall: Vec<f64>,
    pub gb_wall: Vec<f64>,
}

impl BLProfile0 {
    /// Cubic-in-time interpolation of every component.
    pub fn sample(&self, t: f64) -> Profile0Sample {
        let f = |d: &[Vec<f64>]| interp(&self.times, d, t);
        Profile0Sample {
            ub: f(&self.ub),
            vb: f(&self.vb),
            hb: f(&self.hb),
            gb: f(&self.gb),
            vb_wall: f(&self.vb_wall),
            gb_wall: f(&self.gb_wall),
        }
    }

    pub fn zeros(grid: &Arc<Grid>, times: &[f64]) -> Self {
        let z = vec![vec![0.0; grid.len()]; times.len()];
        let w = vec![vec![0.0; grid.nx]; times.len()];
        BLProfile0 {
            grid: grid.clone(),
            times: times.to_vec(),
            ub: z.clone(),
            vb: z.clone(),
            hb: z.clone(),
            gb: z,
            vb_wall: w.clone(),
            gb_wall: w,
            def_vg_residual: vec![0.0; times.len()],
        }
    }

    /// Build v_b, g_b and wall values from given u_b, h_b snapshots.
    pub fn from_tangential(
        grid: &Arc<Grid>,
        times: &[f64],
        ub: Vec<Vec<f64>>,
        hb: Vec<Vec<f64>>,
    ) -> Self {
        let nx = grid.nx;
        let fr = &grid.fourier;
        let top = nx * (grid.ny - 1);
        let tail = |f: &[f64]| {
            let worst = f[top..].iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if worst > crate::fields::TAIL_TOL {
                log::warn!("layer profile tail {worst:.3e} exceeds {:.0e}", crate::fields::TAIL_TOL);
            }
            tail_integral_raw(&fr.dx(f), grid)
        };
        let vb: Vec<Vec<f64>> = ub.iter().map(|f| tail(f)).collect();
        let gb: Vec<Vec<f64>> = hb.iter().map(|f| tail(f)).collect();
        BLProfile0 {
            grid: grid.clone(),
            times: times.to_vec(),
            vb_wall: vb.iter().map(|v| v[..nx].to_vec()).collect(),
            gb_wall: gb.iter().map(|v| v[..nx].to_vec()).collect(),
            def_vg_residual: vec![0.0; times.len()],
            ub,
            vb,
            hb,
            gb,
        }
    }
}

/// u_b⁰ = u^p − ū⁰, h_b⁰ = h^p − h̄⁰, normal parts by tail integrals.
pub fn derive_profile0(state: &BLState0, trace: &BoundaryTrace) -> BLProfile0 {
    let g = &state.grid;
    let (nx, n) = (g.nx, g.ny);
    let mut ub = Vec::new();
    let mut hb = Vec::new();
    let mut samples = Vec::new();
    for (k, &t) in state.times.iter().enumerate() {
        let s = trace.sample(t);
        let mut u = state.up[k].clone();
        let mut h = state.hp[k].clone();
        for j in 0..n {
            for i in 0..nx {
                u[i + nx * j] -= s.ubar[i];
                h[i + nx * j] -= s.hbar[i];
            }
        }
        ub.push(u);
        hb.push(h);
        samples.push(s);
    }
    let mut p = BLProfile0::from_tangential(g, &state.times, ub, hb);
    for (k, s) in samples.iter().enumerate() {
        let mut m = 0.0f64;
        for j in 0..n {
            let eta = g.y[j];
            for i in 0..nx {
                let q = i + nx * j;
                let dv = p.vb[k][q] - (state.vp[k][q] + eta * s.ux[i] + p.vb_wall[k][i]);
                let dg = p.gb[k][q] - (state.gp[k][q] + eta * s.hx[i] + p.gb_wall[k][i]);
                m = m.max(dv.abs()).max(dg.abs());
            }
        }
        p.def_vg_residual[k] = m;
    }
    p
}

/// Per-time max and L² residuals of one equation.
#[derive(Clone, Debug, Default)]
pub struct Residual {
    pub max: Vec<f64>,
    pub l2: Vec<f64>,
}

impl Residual {
    fn push(&mut self, r: &[f64], grid: &Grid) {
        self.max.push(r.iter().fold(0.0f64, |m, v| m.max(v.abs())));
        self.l2.push(l2_raw(r, grid));
    }
    pub fn worst(&self) -> f64 {
        self.max.iter().cloned().fold(0.0, f64::max)
    }
}

#[derive(Clone, Debug)]
pub struct ConsistencyReport {
    pub times: Vec<f64>,
    pub u: Residual,
    pub h: Residual,
    pub g: Residual,
}

/// Pointwise residuals of the decayed-profile equations and the g_b⁰ equation.
/// Time derivatives come from snapshot differences; the η operators are the
/// grid's fourth-order stencils.
pub fn check_profile0_consistency(
    profile: &BLProfile0,
    trace: &BoundaryTrace,
    params: LayerParams,
) -> ConsistencyReport {
    let grid = &profile.grid;
    let (nx, n) = (grid.nx, grid.ny);
    let fr = &grid.fourier;
    let d1 = grid.d1();
    let d2 = grid.d2();
    let dtu = time_derivative(&profile.times, &profile.ub);
    let dth = time_derivative(&profile.times, &profile.hb);
    let dtg = time_derivative(&profile.times, &profile.gb);
    let mut rep = ConsistencyReport {
        times: profile.times.clone(),
        u: Residual::default(),
        h: Residual::default(),
        g: Residual::default(),
    };
    for (k, &t) in profile.times.iter().enumerate() {
        let s = trace.sample(t);
        let (ub, hb, vb, gb) = (&profile.ub[k], &profile.hb[k], &profile.vb[k], &profile.gb[k]);
        let dx = |f: &[f64]| fr.dx(f);
        let (ubx, hbx, vbx, gbx) = (dx(ub), dx(hb), dx(vb), dx(gb));
        let (ube, hbe, vbe, gbe) = (d1.apply(ub, nx), d1.apply(hb, nx), d1.apply(vb, nx), d1.apply(gb, nx));
        let (ubee, hbee, gbee) = (d2.apply(ub, nx), d2.apply(hb, nx), d2.apply(gb, nx));
        let vw_x = fr.dx(&profile.vb_wall[k]);
        let gw_x = fr.dx(&profile.gb_wall[k]);
        let uxx = fr.dx(&s.ux);
        let hxx = fr.dx(&s.hx);
        let mut ru = vec![0.0; nx * n];
        let mut rh = vec![0.0; nx * n];
        let mut rg = vec![0.0; nx * n];
        for j in 0..n {
            let eta = grid.y[j];
            for i in 0..nx {
                let q = i + nx * j;
                let cv = vb[q] - profile.vb_wall[k][i] - eta * s.ux[i];
                let cg = gb[q] - profile.gb_wall[k][i] - eta * s.hx[i];
                let uu = s.ubar[i] + ub[q];
                let hh = s.hbar[i] + hb[q];
                let fu = -(uu * ubx[q] + cv * ube[q] - hh * hbx[q] - cg * hbe[q] + s.ux[i] * ub[q]
                    - s.hx[i] * hb[q])
                    + params.mu * ubee[q];
                let fh = -(uu * hbx[q] + cv * hbe[q] - hh * ubx[q] - cg * ube[q] + s.hx[i] * ub[q]
                    - s.ux[i] * hb[q])
                    + params.kappa * hbee[q];
                let fg = -(uu * gbx[q] + cv * gbe[q] - hh * vbx[q] - cg * vbe[q]
                    - (gw_x[i] + eta * hxx[i]) * ub[q]
                    - s.hx[i] * vb[q]
                    + (vw_x[i] + eta * uxx[i]) * hb[q]
                    + s.ux[i] * gb[q])
                    + params.kappa * gbee[q];
                ru[q] = dtu[k][q] - fu;
                rh[q] = dth[k][q] - fh;
                rg[q] = dtg[k][q] - fg;
            }
        }
        // Wall and far-field rows carry boundary conditions, not the PDE.
        for r in [&mut ru, &mut rh, &mut rg] {
            r[..nx].iter_mut().for_each(|v| *v = 0.0);
            r[nx * (n - 1)..].iter_mut().for_each(|v| *v = 0.0);
        }
        rep.u.push(&ru, grid);
        rep.h.push(&rh, grid);
        rep.g.push(&rg, grid);
    }
    rep
}

#[cfg(test)]
mod tests {
    use super::*;
    use statrs::function::erf::erf;

    fn times(t_end: f64, n: usize) -> Vec<f64> {
        (0..=n).map(|k| t_end * k as f64 / n as f64).collect()
    }

    #[test]
    fn equilibrium_is_preserved() {
        let g = Grid::layer(16, 128, 30.0).unwrap();
        let tr = BoundaryTrace::uniform(&times(0.5, 10), 16, 0.0, 1.0);
        let st = solve_bl0(&tr, 0.5, 0.5, &g, 0.005, LayerParams::default()).unwrap();
        for k in 0..st.times.len() {
            for q in 0..g.len() {
                assert!(st.up[k][q].abs() <= 1e-12);
                assert!(st.vp[k][q].abs() <= 1e-12);
                assert!((st.hp[k][q] - 1.0).abs() <= 1e-12);
                assert!(st.gp[k][q].abs() <= 1e-12);
            }
        }
        let p = derive_profile0(&st, &tr);
        assert!(p.ub.iter().chain(&p.vb).chain(&p.hb).chain(&p.gb).flatten().all(|v| v.abs() <= 1e-12));
        let r = check_profile0_consistency(&p, &tr, st.params);
        assert!(r.u.worst() <= 1e-12 && r.h.worst() <= 1e-12 && r.g.worst() <= 1e-12);
    }

    fn erf_error(neta: usize, dt: f64) -> (f64, BLState0, BoundaryTrace) {
        let g = Grid::layer(8, neta, 30.0).unwrap();
        let tr = BoundaryTrace::uniform(&times(0.5, 10), 8, 1.0, 1.0);
        let st = solve_bl0(&tr, 0.5, 0.5, &g, dt, LayerParams::default()).unwrap();
        let t: f64 = 0.5;
        let last = st.up.last().unwrap();
        let err = (0..neta)
            .map(|j| (last[8 * j] - erf(g.y[j] / (2.0 * t.sqrt()))).abs())
            .fold(0.0, f64::max);

        (err, st, tr)
    }

    #[test]
    fn erf_similarity_solution() {
        let (e1, st, tr) = erf_error(256, 0.005);
        assert!(e1 <= 1e-3, "error {e1}");
        let (e2, _, _) = erf_error(512, 0.0025);
        let rate = (e1 / e2).log2();
        assert!(rate > 1.7, "rate {rate} ({e1} -> {e2})");

        let p = derive_profile0(&st, &tr);
        assert!(p.vb.iter().flatten().all(|v| v.abs() < 1e-12));
        let r = check_profile0_consistency(&p, &tr, st.params);
        assert!(r.g.worst() <= 1e-8);
    }

    #[test]
    fn synthetic_tail_integral() {
        let g = Grid::layer(16, 801, 30.0).unwrap();
        let ts = [0.0, 0.1, 0.2];
        let ub: Vec<Vec<f64>> = ts
            .iter()
            .map(|_| {
                let mut f = vec![0.0; g.len()];
                for j in 0..g.ny {
                    for i in 0..16 {
                        f[i + 16 * j] = g.x[i].sin() * (-g.y[j]).exp();
                    }
                }
                f
            })
            .collect();
        let hb = vec![vec![0.0; g.len()]; 3];
        let p = BLProfile0::from_tangential(&g, &ts, ub, hb);
        for j in 0..g.ny {
            for i in 0..16 {
                let exact = g.x[i].cos() * (-g.y[j]).exp();
                assert!((p.vb[1][i + 16 * j] - exact).abs() < 2e-4);
            }
        }
    }

    #[test]
    fn positivity_gate_fires() {
        // A strongly decreasing wall field forces h^p below δ₀/2.
        let g = Grid::layer(8, 64, 20.0).unwrap();
        let ts = times(0.5, 10);
        let mut tr = BoundaryTrace::uniform(&ts, 8, 0.0, 1.0);
        for (k, &t) in ts.iter().enumerate() {
            tr.hbar[k] = vec![1.0 - 1.8 * t; 8];
        }
        let err = solve_bl0(&tr, 1.0, 0.5, &g, 0.005, LayerParams::default()).unwrap_err();
        assert!(matches!(err, Error::Positivity { .. }), "{err}");
    }
}
