//! First-order layer: pressure corrector, the linear layer system for
//! (u_b¹, h_b¹), and the magnetic boundary corrector ρ.

use crate::bl0::{BLProfile0, LayerParams};
use crate::cutoff::CutoffChi;
use crate::error::{Error, Result};
use crate::fields::time::{interp, time_derivative};
use crate::fields::spectral::Fourier;
use crate::fields::{cumulative_integral_raw, tail_integral_raw, Grid};
use crate::inner0::BoundaryTrace;
use crate::inner1::InnerState1;
use crate::layer::{d_eta, d_eta_upwind, march, Bc, ColumnImex, Diffusion};
use std::sync::Arc;

/// Far-field alarm level for |u_b¹(·, Lη)|.
pub const FAR_FIELD_TOL: f64 = 1e-4;

#[derive(Clone, Debug)]
pub struct PressureBL {
    pub grid: Arc<Grid>,
    pub times: Vec<f64>,
    pub pb: Vec<Vec<f64>>,
    pub dpb: Vec<Vec<f64>>,
}

impl PressureBL {
    pub fn zeros(grid: &Arc<Grid>, times: &[f64]) -> Self {
        let z = vec![vec![0.0; grid.len()]; times.len()];
        PressureBL { grid: grid.clone(), times: times.to_vec(), pb: z.clone(), dpb: z }
    }
}

fn missing_trace(trace: &BoundaryTrace, times: &[f64], what: &str) -> Result<()> {
    let absent: Vec<String> = times
        .iter()
        .filter(|&&t| !trace.covers(t))
        .map(|t| format!("{what} at t={t}"))
        .collect();
    if absent.is_empty() {
        Ok(())
    } else {
        Err(Error::Missing(absent))
    }
}

/// Layer pressure: the tail integral of the normal momentum balance plus
/// the local bracket, and its η-derivative in closed form.
pub fn pressure_corrector(
    profile0: &BLProfile0,
    trace: &BoundaryTrace,
    mu: f64,
) -> Result<PressureBL> {
    missing_trace(trace, &profile0.times, "wall trace")?;
    if profile0.times.len() < 3 {
        return Err(Error::Missing(vec!["at least three profile snapshots for d/dt v_b".into()]));
    }
    let grid = &profile0.grid;
    let (nx, n) = (grid.nx, grid.ny);
    let fr = &grid.fourier;
    let dtv = time_derivative(&profile0.times, &profile0.vb);
    let mut out = PressureBL::zeros(grid, &profile0.times);
    for (k, &t) in profile0.times.iter().enumerate() {
        let s = trace.sample(t);
        let (ub, vb, hb, gb) = (&profile0.ub[k], &profile0.vb[k], &profile0.hb[k], &profile0.gb[k]);
        let v1: Vec<f64> = profile0.vb_wall[k].iter().map(|v| -v).collect();
        let g1: Vec<f64> = profile0.gb_wall[k].iter().map(|v| -v).collect();
        let v1x = fr.dx(&v1);
        let g1x = fr.dx(&g1);
        let (vbx, gbx) = (fr.dx(vb), fr.dx(gb));
        let vbe = grid.d1().apply(vb, nx);
        let gbe = grid.d1().apply(gb, nx);
        let vbee = grid.d2().apply(vb, nx);
        let mut f = vec![0.0; nx * n];
        let mut br = vec![0.0; nx * n];
        let mut dbr = vec![0.0; nx * n];
        for j in 0..n {
            let eta = grid.y[j];
            for i in 0..nx {
                let q = i + nx * j;
                f[q] = dtv[k][q] + (ub[q] + s.ubar[i]) * vbx[q] - (hb[q] + s.hbar[i]) * gbx[q]
                    + (v1x[i] + eta * s.vxy[i]) * ub[q]
                    - (g1x[i] + eta * s.gxy[i]) * hb[q];
                let cv = vb[q] + v1[i] + eta * s.vy[i];
                let cg = gb[q] + g1[i] + eta * s.gy[i];
                br[q] = -(0.5 * vb[q] + v1[i] + eta * s.vy[i]) * vb[q]
                    + (0.5 * gb[q] + g1[i] + eta * s.gy[i]) * gb[q]
                    + mu * vbe[q];
                dbr[q] = -cv * vbe[q] - s.vy[i] * vb[q] + cg * gbe[q] + s.gy[i] * gb[q] + mu * vbee[q];
            }
        }
        let tail = tail_integral_raw(&f, grid);
        out.pb[k] = tail.iter().zip(&br).map(|(a, b)| a + b).collect();
        out.dpb[k] = f.iter().zip(&dbr).map(|(a, b)| -a + b).collect();
    }
    Ok(out)
}

#[derive(Clone, Debug)]
pub struct BLProfile1 {
    pub grid: Arc<Grid>,
    pub times: Vec<f64>,
    pub ub: Vec<Vec<f64>>,
    pub vb: Vec<Vec<f64>>,
    pub hb: Vec<Vec<f64>>,
    pub gb: Vec<Vec<f64>>,
    /// ∫₀^η u_b¹ and ∫₀^η h_b¹.
    pub ub_int: Vec<Vec<f64>>,
    pub hb_int: Vec<Vec<f64>>,
}

impl BLProfile1 {
    pub fn zeros(grid: &Arc<Grid>, times: &[f64]) -> Self {
        let z = vec![vec![0.0; grid.len()]; times.len()];
        BLProfile1 {
            grid: grid.clone(),
            times: times.to_vec(),
            ub: z.clone(),
            vb: z.clone(),
            hb: z.clone(),
            gb: z.clone(),
            ub_int: z.clone(),
            hb_int: z,
        }
    }
}

fn neg(v: Vec<f64>) -> Vec<f64> {
    v.into_iter().map(|x| -x).collect()
}

/// Linear first-order layer with zero initial data, u_b¹|_{η=0} = −ū¹,
/// ∂_η h_b¹|_{η=0} = −∂_y h⁰|_{y=0}, homogeneous Neumann at Lη.
pub fn solve_bl1(
    profile0: &BLProfile0,
    trace: &BoundaryTrace,
    params: LayerParams,
    t_end: f64,
    grid: &Arc<Grid>,
    dt: f64,
) -> Result<BLProfile1> {
    if trace.first.is_none() {
        return Err(Error::Missing(
            ["ubar1", "hbar1", "vbar1", "gbar1", "dy u1", "dy h1"].map(String::from).to_vec(),
        ));
    }
    if !grid.same_shape(&profile0.grid) {
        return Err(Error::Shape("profile0 not on the layer grid".into()));
    }
    let times: Vec<f64> = profile0.times.iter().cloned().filter(|&t| t <= t_end + 1e-12).collect();
    missing_trace(trace, &times, "wall trace")?;
    if (times.last().copied().unwrap_or(0.0) - t_end).abs() > 1e-9 {
        return Err(Error::TimeWindow(format!("profile0 does not reach t={t_end}")));
    }
    let (nx, n) = (grid.nx, grid.ny);
    let h = grid.deta();
    let fr = &grid.fourier;
    let kmax = (nx / 3) as f64;
    let mut imex = ColumnImex::new(
        nx,
        n,
        h,
        vec![
            Diffusion { nu: params.mu, bottom: Bc::Dirichlet, top: Bc::Neumann },
            Diffusion { nu: params.kappa, bottom: Bc::Neumann, top: Bc::Neumann },
        ],
    );
    let speeds = std::cell::Cell::new(0.0f64);
    let mut explicit = |t: f64, st: &[Vec<f64>]| -> Result<Vec<Vec<f64>>> {
        let s = trace.sample(t);
        let f = s.first.as_ref().expect("checked above");
        let p = profile0.sample(t);
        let (u1, h1) = (&st[0], &st[1]);
        let (ub0x, hb0x) = (fr.dx(&p.ub), fr.dx(&p.hb));
        let (ub0e, hb0e) = (d_eta(&p.ub, nx, h), d_eta(&p.hb, nx, h));
        let (u1x, h1x) = (fr.dx(u1), fr.dx(h1));
        let v1 = neg(cumulative_integral_raw(&u1x, grid));
        let g1 = neg(cumulative_integral_raw(&h1x, grid));
        let mut c1v = vec![0.0; nx * n];
        let mut c1g = vec![0.0; nx * n];
        for j in 0..n {
            let eta = grid.y[j];
            for i in 0..nx {
                let q = i + nx * j;
                c1v[q] = p.vb[q] - p.vb_wall[i] + eta * s.vy[i];
                c1g[q] = p.gb[q] - p.gb_wall[i] + eta * s.gy[i];
            }
        }
        let u1e = d_eta_upwind(u1, &c1v, nx, h);
        let h1e = d_eta_upwind(h1, &c1v, nx, h);
        let u1c = d_eta(u1, nx, h);
        let h1c = d_eta(h1, nx, h);
        let mut nu = vec![0.0; nx * n];
        let mut nh = vec![0.0; nx * n];
        let mut sp = 0.0f64;
        for j in 0..n {
            let eta = grid.y[j];
            let e2 = 0.5 * eta * eta;
            for i in 0..nx {
                let q = i + nx * j;
                let uu = p.ub[q] + s.ubar[i];
                let hh = p.hb[q] + s.hbar[i];
                let au = f.ubar[i] + eta * s.uy[i];
                let ah = f.hbar[i] + eta * s.hy[i];
                let bv = eta * f.vy[i] + e2 * s.vyy[i];
                let bg = eta * f.gy[i] + e2 * s.gyy[i];
                let cu = f.ux[i] + eta * s.uxy[i];
                let ch = f.hx[i] + eta * s.hxy[i];
                let rhs_u = -au * ub0x[q] - bv * ub0e[q] + ah * hb0x[q] + bg * hb0e[q] - cu * p.ub[q]
                    - s.uy[i] * p.vb[q]
                    + ch * p.hb[q]
                    + s.hy[i] * p.gb[q];
                let rhs_m = -au * hb0x[q] - bv * hb0e[q] + ah * ub0x[q] + bg * ub0e[q] - ch * p.ub[q]
                    - s.hy[i] * p.vb[q]
                    + cu * p.hb[q]
                    + s.uy[i] * p.gb[q];
                nu[q] = -(uu * u1x[q] + c1v[q] * u1e[q] - hh * h1x[q] - c1g[q] * h1c[q]
                    + (ub0x[q] + s.ux[i]) * u1[q]
                    + ub0e[q] * v1[q]
                    - (hb0x[q] + s.hx[i]) * h1[q]
                    - hb0e[q] * g1[q])
                    + rhs_u;
                nh[q] = -(uu * h1x[q] + c1v[q] * h1e[q] - hh * u1x[q] - c1g[q] * u1c[q]
                    + (hb0x[q] + s.hx[i]) * u1[q]
                    + hb0e[q] * v1[q]
                    - (ub0x[q] + s.ux[i]) * h1[q]
                    - ub0e[q] * g1[q])
                    + rhs_m;
                sp = sp.max((uu.abs() + hh.abs()) * kmax + (c1v[q].abs() + c1g[q].abs()) / h);
            }
        }
        speeds.set(sp);
        let (nu, nh) = (fr.dealias_real(&nu), fr.dealias_real(&nh));
        if nu.iter().chain(&nh).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { ix: 0, iy: 0, value: f64::NAN });
        }
        Ok(vec![nu, nh])
    };
    let bc = |t: f64| {
        let s = trace.sample(t);
        let f = s.first.as_ref().expect("checked above");
        vec![(neg(f.ubar.clone()), vec![0.0; nx]), (neg(s.hy.clone()), vec![0.0; nx])]
    };
    let limit = |_: &[Vec<f64>]| {
        let sp = speeds.get();
        if sp > 0.0 { 1.5 / sp } else { f64::INFINITY }
    };
    let top = nx * (n - 1);
    let mut after = |t: f64, st: &[Vec<f64>]| -> Result<()> {
        let m = st[0][top..].iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if m > FAR_FIELD_TOL {
            return Err(Error::FarField { time: t, value: m, tol: FAR_FIELD_TOL });
        }
        Ok(())
    };
    let mut out = BLProfile1 {
        grid: grid.clone(),
        times: times.clone(),
        ub: Vec::new(),
        vb: Vec::new(),
        hb: Vec::new(),
        gb: Vec::new(),
        ub_int: Vec::new(),
        hb_int: Vec::new(),
    };
    let mut record = |st: &[Vec<f64>]| {
        let ui = cumulative_integral_raw(&st[0], grid);
        let hi = cumulative_integral_raw(&st[1], grid);
        out.vb.push(neg(fr.dx(&ui)));
        out.gb.push(neg(fr.dx(&hi)));
        out.ub.push(st[0].clone());
        out.hb.push(st[1].clone());
        out.ub_int.push(ui);
        out.hb_int.push(hi);
    };
    let mut st = vec![vec![0.0; nx * n], vec![0.0; nx * n]];
    // Coefficient speeds at t = 0 seed the first step limit.
    explicit(0.0, &st)?;
    march(&times, dt, &mut imex, &mut st, &mut explicit, &bc, &limit, &mut after, &mut record)?;
    Ok(out)
}

/// Magnetic boundary corrector ρ = −∂_y h¹|_{y=0}·η·χ(η) and its companions.
#[derive(Clone, Debug)]
pub struct Rho {
    pub grid: Arc<Grid>,
    pub times: Vec<f64>,
    /// −∂_y h¹(t, x, 0) per time.
    pub coef: Vec<Vec<f64>>,
    pub rho: Vec<Vec<f64>>,
    pub drho: Vec<Vec<f64>>,
    pub ddrho: Vec<Vec<f64>>,
    /// ∫₀^η ρ and ∫₀^η ∂_x ρ.
    pub rho_int: Vec<Vec<f64>>,
    pub rho_x_int: Vec<Vec<f64>>,
}

impl Rho {
    pub fn from_coefficients(grid: &Arc<Grid>, times: &[f64], coef: Vec<Vec<f64>>, chi: &CutoffChi) -> Rho {
        let mut r = Rho {
            grid: grid.clone(),
            times: times.to_vec(),
            coef: Vec::new(),
            rho: Vec::new(),
            drho: Vec::new(),
            ddrho: Vec::new(),
            rho_int: Vec::new(),
            rho_x_int: Vec::new(),
        };
        for c in coef {
            let [r0, r1, r2, r3, r4] = Rho::evaluate(&grid.fourier, &c, &grid.y, chi);
            r.rho.push(r0);
            r.drho.push(r1);
            r.ddrho.push(r2);
            r.rho_int.push(r3);
            r.rho_x_int.push(r4);
            r.coef.push(c);
        }
        r
    }

    /// (ρ, ∂_ηρ, ∂²_ηρ, ∫₀^η ρ, ∫₀^η ∂_xρ) for the wall coefficient `coef`
    /// at the η values `eta`, laid out x-fastest.
    pub fn evaluate(fr: &Fourier, coef: &[f64], eta: &[f64], chi: &CutoffChi) -> [Vec<f64>; 5] {
        let nx = coef.len();
        let n = eta.len();
        let cx = fr.dx(coef);
        let mut a = [vec![0.0; nx * n], vec![0.0; nx * n], vec![0.0; nx * n], vec![0.0; nx * n], vec![0.0; nx * n]];
        for (j, &e) in eta.iter().enumerate() {
            let [x0, x1, x2] = chi.eval(e);
            let mom = chi.first_moment(e);
            for i in 0..nx {
                let q = i + nx * j;
                a[0][q] = coef[i] * e * x0;
                a[1][q] = coef[i] * (x0 + e * x1);
                a[2][q] = coef[i] * (2.0 * x1 + e * x2);
                a[3][q] = coef[i] * mom;
                a[4][q] = cx[i] * mom;
            }
        }
        a
    }

    pub fn sample(&self, t: f64) -> [Vec<f64>; 5] {
        let f = |d: &[Vec<f64>]| interp(&self.times, d, t);
        [f(&self.rho), f(&self.drho), f(&self.ddrho), f(&self.rho_int), f(&self.rho_x_int)]
    }
}

/// ρ from the wall normal derivative of h¹ (fourth-order one-sided stencil).
pub fn boundary_corrector_rho(inner1: &InnerState1, grid: &Arc<Grid>, chi: &CutoffChi) -> Rho {
    let g = &inner1.grid;
    let nx = g.nx;
    let coef = inner1
        .states
        .iter()
        .map(|s| (0..nx).map(|i| -g.d1().at(&s.h.values, nx, i, 0)).collect())
        .collect();
    Rho::from_coefficients(grid, &inner1.times, coef, chi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inner0::FirstOrderTrace;
    use statrs::function::erf::erfc;

    fn times(t_end: f64, n: usize) -> Vec<f64> {
        (0..=n).map(|k| t_end * k as f64 / n as f64).collect()
    }

    fn field(g: &Grid, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        (0..g.len()).map(|q| f(g.x[q % g.nx], g.y[q / g.nx])).collect()
    }

    fn with_first(mut tr: BoundaryTrace, u1: impl Fn(f64, f64) -> f64, h1: impl Fn(f64, f64) -> f64) -> BoundaryTrace {
        let nx = tr.nx;
        let x: Vec<f64> = (0..nx).map(|i| 2.0 * std::f64::consts::PI * i as f64 / nx as f64).collect();
        let row = |f: &dyn Fn(f64, f64) -> f64| -> Vec<Vec<f64>> {
            tr.times.iter().map(|&t| x.iter().map(|&x| f(t, x)).collect()).collect()
        };
        let z = row(&|_, _| 0.0);
        tr.first = Some(FirstOrderTrace {
            ubar: row(&u1),
            hbar: row(&h1),
            vbar: z.clone(),
            gbar: z.clone(),
            uy: z.clone(),
            hy: z,
        });
        tr
    }

    #[test]
    fn zero_inputs_give_zero() {
        let g = Grid::layer(8, 64, 20.0).unwrap();
        let ts = times(0.2, 10);
        let p0 = BLProfile0::zeros(&g, &ts);
        let tr = with_first(BoundaryTrace::uniform(&ts, 8, 0.0, 1.0), |_, _| 0.0, |_, _| 0.0);
        let p = pressure_corrector(&p0, &tr, 1.0).unwrap();
        assert!(p.pb.iter().chain(&p.dpb).flatten().all(|v| *v == 0.0));
        let s = solve_bl1(&p0, &tr, LayerParams::default(), 0.2, &g, 0.005).unwrap();
        assert!(s.ub.iter().chain(&s.vb).chain(&s.hb).chain(&s.gb).flatten().all(|v| v.abs() <= 1e-14));
    }

    #[test]
    fn missing_first_order_channels_are_listed() {
        let g = Grid::layer(8, 32, 20.0).unwrap();
        let ts = times(0.2, 4);
        let p0 = BLProfile0::zeros(&g, &ts);
        let tr = BoundaryTrace::uniform(&ts, 8, 0.0, 1.0);
        match solve_bl1(&p0, &tr, LayerParams::default(), 0.2, &g, 0.01) {
            Err(Error::Missing(v)) => assert!(v.iter().any(|s| s == "ubar1")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn stationary_exponential_pressure() {
        let g = Grid::layer(8, 801, 30.0).unwrap();
        let ts = times(0.2, 4);
        let mut p0 = BLProfile0::zeros(&g, &ts);
        let v = field(&g, |_, e| (-e).exp());
        p0.vb = vec![v; ts.len()];
        let tr = BoundaryTrace::uniform(&ts, 8, 0.0, 0.0);
        let p = pressure_corrector(&p0, &tr, 1.0).unwrap();
        for (q, e) in g.y.iter().enumerate().flat_map(|(j, e)| (0..8).map(move |i| (i + 8 * j, e))) {
            let exact = -0.5 * (-2.0 * e).exp() - (-e).exp();
            assert!((p.pb[2][q] - exact).abs() < 1e-6, "eta {e}");
        }
    }

    fn pressure_defect(neta: usize) -> f64 {
        let g = Grid::layer(8, neta, 20.0).unwrap();
        let ts = times(0.2, 8);
        let ub: Vec<Vec<f64>> =
            ts.iter().map(|t| field(&g, |x, e| 0.3 * (1.0 + t) * x.sin() * e * (-e).exp())).collect();
        let hb: Vec<Vec<f64>> =
            ts.iter().map(|t| field(&g, |x, e| 0.2 * (1.0 - t) * x.cos() * (-e * e / 4.0).exp())).collect();
        let p0 = BLProfile0::from_tangential(&g, &ts, ub, hb);
        let mut tr = BoundaryTrace::uniform(&ts, 8, 0.0, 1.0);
        for row in tr.ubar.iter_mut() {
            for (i, v) in row.iter_mut().enumerate() {
                *v = 0.5 + 0.2 * g.x[i].cos();
            }
        }
        let p = pressure_corrector(&p0, &tr, 1.0).unwrap();
        let k = 4;
        let fd = g.d1().apply(&p.pb[k], 8);
        // Rows next to the wall and the lid use one-sided closures of lower accuracy.
        (0..g.len())
            .filter(|q| (0.5..=19.0).contains(&g.y[q / 8]))
            .map(|q| (fd[q] - p.dpb[k][q]).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn pressure_derivative_converges_at_quadrature_order() {
        let (a, b) = (pressure_defect(201), pressure_defect(401));
        let ratio = a / b;
        assert!((3.2..=4.8).contains(&ratio), "ratio {ratio} ({a} -> {b})");
    }

    #[test]
    fn heat_kernel_wall_layer() {
        let g = Grid::layer(8, 256, 30.0).unwrap();
        let ts = times(0.5, 10);
        let p0 = BLProfile0::zeros(&g, &ts);
        let tr = with_first(BoundaryTrace::uniform(&ts, 8, 0.0, 1.0), |_, _| 0.7, |_, _| 0.0);
        let s = solve_bl1(&p0, &tr, LayerParams::default(), 0.5, &g, 0.005).unwrap();
        let t: f64 = 0.5;
        let last = s.ub.last().unwrap();
        for j in 0..g.ny {
            let exact = -0.7 * erfc(g.y[j] / (2.0 * t.sqrt()));
            assert!((last[8 * j] - exact).abs() <= 1e-3, "eta {} {} vs {exact}", g.y[j], last[8 * j]);
        }
        assert!(s.hb.iter().flatten().all(|v| v.abs() <= 1e-14));
    }

    fn generic(c: f64) -> BLProfile1 {
        let g = Grid::layer(8, 96, 20.0).unwrap();
        let ts = times(0.2, 10);
        let ub: Vec<Vec<f64>> = ts.iter().map(|t| field(&g, |x, e| 0.2 * t * x.sin() * (-e).exp())).collect();
        let hb: Vec<Vec<f64>> =
            ts.iter().map(|t| field(&g, |x, e| 0.1 * t * x.cos() * e * (-e).exp())).collect();
        let p0 = BLProfile0::from_tangential(&g, &ts, ub, hb);
        let mut tr = BoundaryTrace::uniform(&ts, 8, 0.3, 1.0);
        for row in tr.hy.iter_mut().chain(tr.uy.iter_mut()) {
            for (i, v) in row.iter_mut().enumerate() {
                *v = 0.05 * g.x[i].cos();
            }
        }
        let tr = with_first(tr, |t, x| c * t * x.cos(), |t, x| 0.5 * c * t * x.sin());
        solve_bl1(&p0, &tr, LayerParams::default(), 0.2, &g, 0.005).unwrap()
    }

    fn flat(s: &BLProfile1) -> Vec<f64> {
        s.ub.iter().chain(&s.hb).flatten().cloned().collect()
    }

    #[test]
    fn affine_in_first_order_data() {
        let z = flat(&generic(0.0));
        let one: Vec<f64> = flat(&generic(1.0)).iter().zip(&z).map(|(a, b)| a - b).collect();
        let scale = one.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(scale > 1e-3);
        for a in [-2.0, 3.0] {
            let s = flat(&generic(a));
            let d = s.iter().zip(&z).zip(&one).fold(0.0f64, |m, ((s, z), o)| m.max((s - z - a * o).abs()));
            assert!(d / scale <= 1e-10, "alpha {a}: {d}");
        }
    }

    #[test]
    fn wall_rows_and_divergence() {
        let s = generic(1.0);
        let g = &s.grid;
        let fr = &g.fourier;
        for k in 0..s.times.len() {
            let t = s.times[k];
            for i in 0..8 {
                assert!((s.ub[k][i] + t * g.x[i].cos()).abs() <= 1e-12);
                assert_eq!(s.vb[k][i], 0.0);
                assert_eq!(s.gb[k][i], 0.0);
            }
            // Discrete divergence in the trapezoidal (midpoint) form the layer uses.
            let (ux, hx) = (fr.dx(&s.ub[k]), fr.dx(&s.hb[k]));
            let h = g.deta();
            for q in 8..g.len() {
                let dv = (s.vb[k][q] - s.vb[k][q - 8]) / h + 0.5 * (ux[q] + ux[q - 8]);
                let dg = (s.gb[k][q] - s.gb[k][q - 8]) / h + 0.5 * (hx[q] + hx[q - 8]);
                assert!(dv.abs() <= 1e-10 && dg.abs() <= 1e-10, "{dv} {dg}");
            }
        }
    }

    #[test]
    fn rho_conditions_and_moment() {
        let g = Grid::layer(16, 201, 10.0).unwrap();
        let chi = CutoffChi;
        let ts = [0.0, 0.1];
        let coef = vec![vec![0.0; 16], g.x.iter().map(|x| -x.cos()).collect()];
        let r = Rho::from_coefficients(&g, &ts, coef, &chi);
        assert!(r.rho[0].iter().all(|v| *v == 0.0));
        for i in 0..16 {
            assert!((r.drho[1][i] + g.x[i].cos()).abs() <= 1e-14);
            let fd = g.d1().at(&r.rho[1], 16, i, 0);
            assert!((fd + g.x[i].cos()).abs() <= 1e-10);
        }
        // Independent composite Simpson quadrature of ∫₀^η s χ(s) ds.
        let simpson = |e: f64| {
            let m = 4000;
            let h = e / m as f64;
            (0..=m)
                .map(|k| {
                    let w = if k == 0 || k == m { 1.0 } else if k % 2 == 1 { 4.0 } else { 2.0 };
                    let s = k as f64 * h;
                    w * s * chi.value(s)
                })
                .sum::<f64>()
                * h
                / 3.0
        };
        for j in 0..g.ny {
            let m = if g.y[j] <= 1.0 { 0.5 * g.y[j] * g.y[j] } else { simpson(g.y[j]) };
            for i in 0..16 {
                assert!((r.rho_x_int[1][i + 16 * j] - g.x[i].sin() * m).abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn rho_from_quiet_inner_flow() {
        use crate::fields::Stretching;
        use crate::inner0::{solve_ideal_mhd, Preset};
        use crate::inner1::{solve_linearized_mhd, WallData};
        let g = Grid::physical(16, 64, 8.0, Stretching::Tanh { beta: 1.5 }).unwrap();
        let bg = solve_ideal_mhd(&Preset::UniformField { c: 1.0 }.initial_state(&g), 0.2, &g, 0.01).unwrap();
        let w = WallData::zeros(&bg.times, 16);
        let s1 = solve_linearized_mhd(&bg, &w, 0.2, &g, 0.01).unwrap();
        let lg = Grid::layer(16, 64, 20.0).unwrap();
        let r = boundary_corrector_rho(&s1, &lg, &CutoffChi);
        assert!(r.rho.iter().chain(&r.rho_x_int).flatten().all(|v| *v == 0.0));
    }
}
