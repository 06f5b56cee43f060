//! Stream-function/flux-function engine shared by the ideal solvers.
//!
//! Nonzero x-modes carry u = ∂_yψ, v = -∂_xψ, h = ∂_yA, g = -∂_xA, so both
//! vector fields are discretely divergence-free. The x-mean of u and h is
//! evolved directly.

use crate::error::{Error, Result};
use crate::fields::banded::{BandLu, BandMatrix};
use crate::fields::Grid;
use num_complex::Complex64 as C;

pub const RK_GAMMA: [f64; 3] = [8.0 / 15.0, 5.0 / 12.0, 3.0 / 4.0];
pub const RK_ZETA: [f64; 3] = [0.0, -17.0 / 60.0, -5.0 / 12.0];
pub const RK_ALPHA: [f64; 3] = [4.0 / 15.0, 1.0 / 15.0, 1.0 / 6.0];
/// Stage end times as fractions of Δt.
pub const RK_C: [f64; 3] = [8.0 / 15.0, 2.0 / 3.0, 1.0];

const ZERO: C = C { re: 0.0, im: 0.0 };

/// Potentials: ψ̂, Â per mode (row-major, x fastest), x-means of u and h.
#[derive(Clone, Debug)]
pub struct Kin {
    pub psi: Vec<C>,
    pub a: Vec<C>,
    pub um: Vec<f64>,
    pub hm: Vec<f64>,
}

impl Kin {
    pub fn zeros(nx: usize, ny: usize) -> Kin {
        Kin {
            psi: vec![ZERO; nx * ny],
            a: vec![ZERO; nx * ny],
            um: vec![0.0; ny],
            hm: vec![0.0; ny],
        }
    }

    pub fn to_flat(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(4 * self.psi.len() + 2 * self.um.len());
        for z in self.psi.iter().chain(&self.a) {
            v.push(z.re);
            v.push(z.im);
        }
        v.extend_from_slice(&self.um);
        v.extend_from_slice(&self.hm);
        v
    }

    pub fn from_flat(v: &[f64], nx: usize, ny: usize) -> Kin {
        let n = nx * ny;
        let c = |o: usize| (0..n).map(|k| C::new(v[o + 2 * k], v[o + 2 * k + 1])).collect();
        Kin {
            psi: c(0),
            a: c(2 * n),
            um: v[4 * n..4 * n + ny].to_vec(),
            hm: v[4 * n + ny..4 * n + 2 * ny].to_vec(),
        }
    }
}

/// Physical fields and first derivatives.
#[derive(Clone, Debug)]
pub struct Phys {
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub h: Vec<f64>,
    pub g: Vec<f64>,
    pub ux: Vec<f64>,
    pub uy: Vec<f64>,
    pub vx: Vec<f64>,
    pub vy: Vec<f64>,
    pub hx: Vec<f64>,
    pub hy: Vec<f64>,
    pub gx: Vec<f64>,
    pub gy: Vec<f64>,
}

fn times_ik(grid: &Grid, f: &[C]) -> Vec<C> {
    let nx = grid.nx;
    f.iter()
        .enumerate()
        .map(|(k, z)| z * C::new(0.0, grid.fourier.dk(k % nx)))
        .collect()
}

/// Spectral velocity and magnetic components from potentials.
pub fn components(grid: &Grid, kin: &Kin) -> [Vec<C>; 4] {
    let nx = grid.nx;
    let d1 = grid.d1();
    let mut uh = d1.apply(&kin.psi, nx);
    let mut hh = d1.apply(&kin.a, nx);
    for j in 0..grid.ny {
        uh[nx * j] = C::new(kin.um[j], 0.0);
        hh[nx * j] = C::new(kin.hm[j], 0.0);
    }
    let vh: Vec<C> = times_ik(grid, &kin.psi).into_iter().map(|z| -z).collect();
    let gh: Vec<C> = times_ik(grid, &kin.a).into_iter().map(|z| -z).collect();
    [uh, vh, hh, gh]
}

pub fn phys(grid: &Grid, kin: &Kin) -> Phys {
    let nx = grid.nx;
    let fr = &grid.fourier;
    let d1 = grid.d1();
    let [uh, vh, hh, gh] = components(grid, kin);
    let inv = |z: &[C]| fr.inverse(z);
    Phys {
        ux: inv(&times_ik(grid, &uh)),
        uy: inv(&d1.apply(&uh, nx)),
        vx: inv(&times_ik(grid, &vh)),
        vy: inv(&d1.apply(&vh, nx)),
        hx: inv(&times_ik(grid, &hh)),
        hy: inv(&d1.apply(&hh, nx)),
        gx: inv(&times_ik(grid, &gh)),
        gy: inv(&d1.apply(&gh, nx)),
        u: inv(&uh),
        v: inv(&vh),
        h: inv(&hh),
        g: inv(&gh),
    }
}

/// Transport of `b` by `a`: (N_u, N_v, N_A) with
/// N_u = -(a_u b_ux + a_v b_uy) + (a_h b_hx + a_g b_hy), likewise N_v,
/// and N_A = a_u b_g - a_v b_h.
pub fn bilinear(a: &Phys, b: &Phys) -> [Vec<f64>; 3] {
    let n = a.u.len();
    let mut nu = vec![0.0; n];
    let mut nv = vec![0.0; n];
    let mut na = vec![0.0; n];
    for k in 0..n {
        nu[k] = -(a.u[k] * b.ux[k] + a.v[k] * b.uy[k]) + (a.h[k] * b.hx[k] + a.g[k] * b.hy[k]);
        nv[k] = -(a.u[k] * b.vx[k] + a.v[k] * b.vy[k]) + (a.h[k] * b.gx[k] + a.g[k] * b.gy[k]);
        na[k] = a.u[k] * b.g[k] - a.v[k] * b.h[k];
    }
    [nu, nv, na]
}

/// Evolved variables: vorticity and flux function per nonzero mode, means.
#[derive(Clone, Debug)]
pub struct Q {
    pub w: Vec<C>,
    pub a: Vec<C>,
    pub um: Vec<f64>,
    pub hm: Vec<f64>,
}

impl Q {
    pub fn axpy(&mut self, s: f64, d: &Q) {
        for (x, y) in self.w.iter_mut().zip(&d.w) {
            *x += y * s;
        }
        for (x, y) in self.a.iter_mut().zip(&d.a) {
            *x += y * s;
        }
        for (x, y) in self.um.iter_mut().zip(&d.um) {
            *x += y * s;
        }
        for (x, y) in self.hm.iter_mut().zip(&d.hm) {
            *x += y * s;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.w.iter().chain(&self.a).all(|z| z.re.is_finite() && z.im.is_finite())
            && self.um.iter().chain(&self.hm).all(|v| v.is_finite())
    }
}

/// Wall values of ψ̂ and Â per mode (length nx) and their time derivatives.
#[derive(Clone, Debug)]
pub struct WallPotentials {
    pub psi: Vec<C>,
    pub a: Vec<C>,
    pub dpsi: Vec<C>,
}

impl WallPotentials {
    pub fn zeros(nx: usize) -> Self {
        WallPotentials {
            psi: vec![ZERO; nx],
            a: vec![ZERO; nx],
            dpsi: vec![ZERO; nx],
        }
    }

    /// From physical wall-normal data v(x), g(x), dv/dt(x):
    /// ψ̂_k = i v̂_k / k, Â_k = i ĝ_k / k.
    pub fn from_normal_data(grid: &Grid, v: &[f64], g: &[f64], dv: &[f64]) -> Result<Self> {
        let fr = &grid.fourier;
        let lift = |f: &[f64]| -> Result<Vec<C>> {
            let c = fr.forward(f);
            let scale = 1.0 + f.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            if c[0].norm() > 1e-10 * scale {
                return Err(Error::InitialData(format!(
                    "wall-normal data has nonzero x-mean {:.3e}",
                    c[0].re
                )));
            }
            Ok((0..grid.nx)
                .map(|k| {
                    let kk = fr.dk(k);
                    if kk == 0.0 || !fr.kept(k) {
                        ZERO
                    } else {
                        c[k] * C::new(0.0, 1.0 / kk)
                    }
                })
                .collect())
        };
        Ok(WallPotentials {
            psi: lift(v)?,
            a: lift(g)?,
            dpsi: lift(dv)?,
        })
    }
}

/// Right-hand side closure result.
pub struct Eval {
    pub dq: Q,
    pub kin: Kin,
    pub phys: Phys,
    /// Dealiased spectral N_u, N_v (used for the pressure).
    pub nu: Vec<C>,
    pub nv: Vec<C>,
    pub nw: Vec<C>,
}

pub enum Dynamics<'a> {
    Nonlinear,
    /// Linearisation about a background given at any time.
    Linear(&'a (dyn Fn(f64) -> Phys + Sync)),
}

pub type Forcing<'a> = &'a (dyn Fn(f64) -> [Vec<f64>; 3] + Sync);
pub type Wall<'a> = &'a (dyn Fn(f64) -> WallPotentials + Sync);

pub struct Engine<'a> {
    pub grid: &'a Grid,
    pub dynamics: Dynamics<'a>,
    pub wall: Wall<'a>,
    pub forcing: Option<Forcing<'a>>,
    pub filter: f64,
    /// Dirichlet Poisson factorizations indexed by |k|.
    lus: Vec<Option<BandLu>>,
}

impl<'a> Engine<'a> {
    pub fn new(
        grid: &'a Grid,
        dynamics: Dynamics<'a>,
        wall: Wall<'a>,
        forcing: Option<Forcing<'a>>,
        filter: f64,
    ) -> Result<Self> {
        let fr = &grid.fourier;
        let kmax = (0..grid.nx)
            .filter(|&i| fr.kept(i))
            .map(|i| fr.wavenumber(i).abs() as usize)
            .max()
            .unwrap_or(0);
        let mut lus = vec![None];
        for k in 1..=kmax {
            lus.push(Some(dirichlet_laplacian(grid, k as f64)?));
        }
        Ok(Engine {
            grid,
            dynamics,
            wall,
            forcing,
            filter,
            lus,
        })
    }

    fn lu(&self, i: usize) -> Option<&BandLu> {
        let fr = &self.grid.fourier;
        if i == 0 || !fr.kept(i) {
            return None;
        }
        self.lus[fr.wavenumber(i).abs() as usize].as_ref()
    }

    /// Solve -(D2 - k²)ψ = ω in the interior with ψ(0) = b0, ψ(L) = 0.
    pub fn invert(&self, w: &[C], b0: &[C]) -> Vec<C> {
        let (nx, ny) = (self.grid.nx, self.grid.ny);
        let mut psi = vec![ZERO; nx * ny];
        let mut re = vec![0.0; ny];
        let mut im = vec![0.0; ny];
        for i in 0..nx {
            let Some(lu) = self.lu(i) else { continue };
            re[0] = b0[i].re;
            im[0] = b0[i].im;
            for j in 1..ny - 1 {
                re[j] = w[i + nx * j].re;
                im[j] = w[i + nx * j].im;
            }
            re[ny - 1] = 0.0;
            im[ny - 1] = 0.0;
            lu.solve_in_place(&mut re);
            lu.solve_in_place(&mut im);
            for j in 0..ny {
                psi[i + nx * j] = C::new(re[j], im[j]);
            }
        }
        psi
    }

    /// Vorticity -(D2 - k²)ψ for every row.
    pub fn vorticity(&self, psi: &[C]) -> Vec<C> {
        let nx = self.grid.nx;
        let d2 = self.grid.d2().apply(psi, nx);
        let fr = &self.grid.fourier;
        psi.iter()
            .zip(d2)
            .enumerate()
            .map(|(k, (p, q))| {
                let kk = fr.wavenumber(k % nx);
                -(q - p * (kk * kk))
            })
            .collect()
    }

    pub fn kin_of(&self, t: f64, q: &Q) -> Kin {
        let wall = (self.wall)(t);
        let nx = self.grid.nx;
        let mut a = q.a.clone();
        let top = nx * (self.grid.ny - 1);
        for i in 0..nx {
            a[i] = wall.a[i];
            a[top + i] = ZERO;
        }
        Kin {
            psi: self.invert(&q.w, &wall.psi),
            a,
            um: q.um.clone(),
            hm: q.hm.clone(),
        }
    }

    pub fn eval(&self, t: f64, q: &Q) -> Eval {
        let grid = self.grid;
        let (nx, ny) = (grid.nx, grid.ny);
        let fr = &grid.fourier;
        let kin = self.kin_of(t, q);
        let ph = phys(grid, &kin);
        let [mut nu, mut nv, mut na] = match &self.dynamics {
            Dynamics::Nonlinear => bilinear(&ph, &ph),
            Dynamics::Linear(bg) => {
                let b = bg(t);
                let [a1, a2, a3] = bilinear(&b, &ph);
                let [b1, b2, b3] = bilinear(&ph, &b);
                [
                    a1.iter().zip(&b1).map(|(x, y)| x + y).collect(),
                    a2.iter().zip(&b2).map(|(x, y)| x + y).collect(),
                    a3.iter().zip(&b3).map(|(x, y)| x + y).collect(),
                ]
            }
        };
        if let Some(f) = self.forcing {
            let [fu, fv, fa] = f(t);
            for k in 0..nu.len() {
                nu[k] += fu[k];
                nv[k] += fv[k];
                na[k] += fa[k];
            }
        }
        let mut nuh = fr.forward(&nu);
        let mut nvh = fr.forward(&nv);
        let mut nah = fr.forward(&na);
        fr.dealias(&mut nuh);
        fr.dealias(&mut nvh);
        fr.dealias(&mut nah);
        let d1 = grid.d1();
        let dnu = d1.apply(&nuh, nx);
        let mut nw = vec![ZERO; nx * ny];
        let mut da = nah.clone();
        for j in 0..ny {
            for i in 0..nx {
                let k = i + nx * j;
                if i == 0 {
                    da[k] = ZERO;
                } else {
                    nw[k] = nvh[k] * C::new(0.0, fr.dk(i)) - dnu[k];
                }
            }
        }
        for i in 0..nx {
            da[i] = ZERO;
            da[nx * (ny - 1) + i] = ZERO;
        }
        let na0: Vec<f64> = (0..ny).map(|j| nah[nx * j].re).collect();
        let dhm = d1.apply_col(&na0);
        let dum: Vec<f64> = (0..ny).map(|j| nuh[nx * j].re).collect();
        Eval {
            dq: Q {
                w: nw.clone(),
                a: da,
                um: dum,
                hm: dhm,
            },
            kin,
            phys: ph,
            nu: nuh,
            nv: nvh,
            nw,
        }
    }

    /// Weak sixth-difference dissipation on nonzero modes.
    pub fn apply_filter(&self, q: &mut Q) {
        if self.filter == 0.0 {
            return;
        }
        let (nx, ny) = (self.grid.nx, self.grid.ny);
        let c = [1.0, -6.0, 15.0, -20.0, 15.0, -6.0, 1.0];
        for f in [&mut q.w, &mut q.a] {
            let old = f.clone();
            for j in 3..ny - 3 {
                for i in 1..nx {
                    let mut s = ZERO;
                    for (m, w) in c.iter().enumerate() {
                        s += old[i + nx * (j + m - 3)] * *w;
                    }
                    f[i + nx * j] += s * self.filter;
                }
            }
        }
    }

    pub fn cfl_limit(&self, ph: &Phys) -> f64 {
        advective_limit(self.grid, ph)
    }

    /// Step limit: advection speeds are the background's for linear dynamics.
    pub fn step_limit(&self, t: f64, ph: &Phys) -> f64 {
        match &self.dynamics {
            Dynamics::Nonlinear => self.cfl_limit(ph),
            Dynamics::Linear(bg) => self.cfl_limit(&bg(t)),
        }
    }

    pub fn q_from_kin(&self, kin: &Kin) -> Q {
        Q {
            w: self.vorticity(&kin.psi),
            a: kin.a.clone(),
            um: kin.um.clone(),
            hm: kin.hm.clone(),
        }
    }

    /// Pressure and its wall x-derivative consistent with the momentum
    /// balance: ∂_x p = N_u - ∂_t u and ∂_y p̂_0 = N̂_v,0.
    pub fn pressure(&self, t: f64, ev: &Eval) -> (Vec<f64>, Vec<f64>) {
        let grid = self.grid;
        let (nx, ny) = (grid.nx, grid.ny);
        let fr = &grid.fourier;
        let wall = (self.wall)(t);
        let dpsi = self.invert(&ev.nw, &wall.dpsi);
        let dtu = grid.d1().apply(&dpsi, nx);
        let mut ph = vec![ZERO; nx * ny];
        let mut px = vec![ZERO; nx];
        for j in 0..ny {
            for i in 1..nx {
                let k = i + nx * j;
                let kk = fr.dk(i);
                if kk == 0.0 || !fr.kept(i) {
                    continue;
                }
                let f = ev.nu[k] - dtu[k];
                ph[k] = f / C::new(0.0, kk);
                if j == 0 {
                    px[i] = f;
                }
            }
        }
        let mut p0 = vec![0.0; ny];
        for j in 1..ny {
            p0[j] = p0[j - 1]
                + 0.5 * (grid.y[j] - grid.y[j - 1]) * (ev.nv[nx * j].re + ev.nv[nx * (j - 1)].re);
        }
        let mean = p0.iter().zip(&grid.wy).map(|(p, w)| p * w).sum::<f64>() / grid.length;
        for j in 0..ny {
            ph[nx * j] = C::new(p0[j] - mean, 0.0);
        }
        (fr.inverse(&ph), fr.inverse(&px))
    }
}

/// Advective time step limit of the explicit RK3 stages for the fields `ph`.
pub fn advective_limit(g: &Grid, ph: &Phys) -> f64 {
    let nx = g.nx;
    let kmax = (g.nx / 3) as f64;
    let mut sx = 0.0f64;
    let mut sy = 0.0f64;
    for j in 0..g.ny {
        let dy = if j == 0 {
            g.y[1] - g.y[0]
        } else if j == g.ny - 1 {
            g.y[j] - g.y[j - 1]
        } else {
            (g.y[j] - g.y[j - 1]).min(g.y[j + 1] - g.y[j])
        };
        for i in 0..nx {
            let k = i + nx * j;
            sx = sx.max(ph.u[k].abs() + ph.h[k].abs());
            sy = sy.max((ph.v[k].abs() + ph.g[k].abs()) / dy);
        }
    }
    let s = sx * kmax + sy;
    if s == 0.0 {
        f64::INFINITY
    } else {
        1.5 / s
    }
}

fn dirichlet_laplacian(grid: &Grid, k: f64) -> Result<BandLu> {
    let ny = grid.ny;
    let d2 = grid.d2();
    let (kl, ku) = d2.bandwidth();
    let mut m = BandMatrix::zeros(ny, kl, ku);
    m.set(0, 0, 1.0);
    for j in 1..ny - 1 {
        let s = &d2.rows[j];
        for (c, w) in s.w.iter().enumerate() {
            m.add(j, s.start + c, -w);
        }
        m.add(j, j, k * k);
    }
    m.set(ny - 1, ny - 1, 1.0);
    m.factor()
}

/// Snapshot schedule: times n·Δt_snap and the number of steps between them.
pub fn schedule(t_end: f64, dt: f64, cadence: usize) -> Result<(Vec<f64>, usize)> {
    if !(dt > 0.0 && t_end > 0.0) || cadence == 0 {
        return Err(Error::Config(format!(
            "invalid schedule T={t_end}, dt={dt}, cadence={cadence}"
        )));
    }
    let dts = dt * cadence as f64;
    let n = (t_end / dts).round() as usize;
    if n < 1 || ((n as f64) * dts - t_end).abs() > 1e-9 * t_end {
        return Err(Error::Config(format!(
            "T={t_end} is not a whole number of snapshot intervals {dts}"
        )));
    }
    Ok(((0..=n).map(|k| k as f64 * dts).collect(), cadence))
}

/// Explicit SMR low-storage RK3 step, given the right-hand side at `t`.
pub fn rk3_step(eng: &Engine, t: f64, dt: f64, q: &mut Q, dq0: Q) -> Result<()> {
    let mut prev: Option<Q> = None;
    let mut dq = dq0;
    for s in 0..3 {
        if s > 0 {
            dq = eng.eval(t + RK_C[s - 1] * dt, q).dq;
        }
        q.axpy(dt * RK_GAMMA[s], &dq);
        if let Some(p) = &prev {
            q.axpy(dt * RK_ZETA[s], p);
        }
        prev = Some(dq.clone());
    }
    eng.apply_filter(q);
    if !q.is_finite() {
        return Err(Error::Blowup { time: t + dt });
    }
    Ok(())
}
