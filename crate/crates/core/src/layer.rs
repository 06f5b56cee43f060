//! Column-wise IMEX stepping and η-operators shared by the layer solvers.

use crate::error::{Error, Result};
use crate::fields::banded::{BandLu, BandMatrix};
use crate::potential::{RK_ALPHA, RK_C, RK_GAMMA, RK_ZETA};
use std::collections::HashMap;

/// Boundary row type. Neumann rows use the three-point one-sided difference.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Bc {
    Dirichlet,
    Neumann,
}

#[derive(Clone, Copy, Debug)]
pub struct Diffusion {
    pub nu: f64,
    pub bottom: Bc,
    pub top: Bc,
}

/// Explicit part: (t, fields) -> per-field tendencies (boundary rows ignored).
pub type Explicit<'a> = dyn FnMut(f64, &[Vec<f64>]) -> Result<Vec<Vec<f64>>> + 'a;
/// Boundary data at time t: per field, (bottom row, top row).
pub type BoundaryData<'a> = dyn Fn(f64) -> Vec<(Vec<f64>, Vec<f64>)> + 'a;

pub struct ColumnImex {
    pub nx: usize,
    pub n: usize,
    pub deta: f64,
    pub fields: Vec<Diffusion>,
    lus: HashMap<(usize, u64), BandLu>,
}

impl ColumnImex {
    pub fn new(nx: usize, n: usize, deta: f64, fields: Vec<Diffusion>) -> Self {
        ColumnImex { nx, n, deta, fields, lus: HashMap::new() }
    }

    fn lu(&mut self, f: usize, c: f64) -> Result<&BandLu> {
        let key = (f, c.to_bits());
        if !self.lus.contains_key(&key) {
            let d = self.fields[f];
            let n = self.n;
            let h = self.deta;
            let mut m = BandMatrix::zeros(n, 2, 2);
            boundary_row(&mut m, 0, d.bottom, h, false);
            boundary_row(&mut m, n - 1, d.top, h, true);
            let s = c * d.nu / (h * h);
            for j in 1..n - 1 {
                m.set(j, j - 1, -s);
                m.set(j, j, 1.0 + 2.0 * s);
                m.set(j, j + 1, -s);
            }
            self.lus.insert(key, m.factor()?);
        }
        Ok(&self.lus[&key])
    }

    /// One SMR IMEX RK3 step of length `dt` from time `t`.
    pub fn step(
        &mut self,
        t: f64,
        dt: f64,
        state: &mut [Vec<f64>],
        explicit: &mut Explicit,
        bc: &BoundaryData,
    ) -> Result<()> {
        let (nx, n) = (self.nx, self.n);
        let ih2 = 1.0 / (self.deta * self.deta);
        let mut prev: Option<Vec<Vec<f64>>> = None;
        for s in 0..3 {
            let t0 = t + if s == 0 { 0.0 } else { RK_C[s - 1] * dt };
            let t1 = t + RK_C[s] * dt;
            let nl = explicit(t0, state)?;
            let bcs = bc(t1);
            for f in 0..state.len() {
                let nu = self.fields[f].nu;
                let old = &state[f];
                let mut r = vec![0.0; nx * n];
                for j in 1..n - 1 {
                    for i in 0..nx {
                        let k = i + nx * j;
                        let lap = (old[k - nx] - 2.0 * old[k] + old[k + nx]) * ih2;
                        let mut v = old[k] + dt * (RK_GAMMA[s] * nl[f][k] + RK_ALPHA[s] * nu * lap);
                        if let Some(p) = &prev {
                            v += dt * RK_ZETA[s] * p[f][k];
                        }
                        r[k] = v;
                    }
                }
                r[..nx].copy_from_slice(&bcs[f].0);
                r[nx * (n - 1)..].copy_from_slice(&bcs[f].1);
                let lu = self.lu(f, RK_ALPHA[s] * dt)?;
                let mut col = vec![0.0; n];
                for i in 0..nx {
                    for j in 0..n {
                        col[j] = r[i + nx * j];
                    }
                    lu.solve_in_place(&mut col);
                    for j in 0..n {
                        r[i + nx * j] = col[j];
                    }
                }
                state[f] = r;
            }
            prev = Some(nl);
        }
        if state.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Blowup { time: t + dt });
        }
        Ok(())
    }
}

fn boundary_row(m: &mut BandMatrix, j: usize, bc: Bc, h: f64, top: bool) {
    match (bc, top) {
        (Bc::Dirichlet, _) => m.set(j, j, 1.0),
        (Bc::Neumann, false) => {
            m.set(j, j, -1.5 / h);
            m.set(j, j + 1, 2.0 / h);
            m.set(j, j + 2, -0.5 / h);
        }
        (Bc::Neumann, true) => {
            m.set(j, j, 1.5 / h);
            m.set(j, j - 1, -2.0 / h);
            m.set(j, j - 2, 0.5 / h);
        }
    }
}

/// Second-order central ∂_η (one-sided three-point at both ends).
pub fn d_eta(f: &[f64], nx: usize, h: f64) -> Vec<f64> {
    let n = f.len() / nx;
    let mut out = vec![0.0; f.len()];
    for i in 0..nx {
        let a = |j: usize| f[i + nx * j];
        out[i] = (-1.5 * a(0) + 2.0 * a(1) - 0.5 * a(2)) / h;
        for j in 1..n - 1 {
            out[i + nx * j] = (a(j + 1) - a(j - 1)) / (2.0 * h);
        }
        out[i + nx * (n - 1)] = (1.5 * a(n - 1) - 2.0 * a(n - 2) + 0.5 * a(n - 3)) / h;
    }
    out
}

/// Upwind-biased ∂_η for advection by `vel`: second order in the interior,
/// first order next to either boundary.
pub fn d_eta_upwind(f: &[f64], vel: &[f64], nx: usize, h: f64) -> Vec<f64> {
    let n = f.len() / nx;
    let mut out = vec![0.0; f.len()];
    for j in 1..n - 1 {
        for i in 0..nx {
            let k = i + nx * j;
            out[k] = if vel[k] > 0.0 {
                if j >= 2 {
                    (3.0 * f[k] - 4.0 * f[k - nx] + f[k - 2 * nx]) / (2.0 * h)
                } else {
                    (f[k] - f[k - nx]) / h
                }
            } else if j + 2 < n {
                (-3.0 * f[k] + 4.0 * f[k + nx] - f[k + 2 * nx]) / (2.0 * h)
            } else {
                (f[k + nx] - f[k]) / h
            };
        }
    }
    out
}

/// Step sizes from one stored time to the next: the first `n_fine` steps of
/// the whole run are split into `split` substeps.
pub fn substeps(steps_done: usize, dt: f64, n_fine: usize, split: usize) -> Vec<f64> {
    if steps_done < n_fine {
        vec![dt / split as f64; split]
    } else {
        vec![dt]
    }
}

/// Advance `state` across the stored times, splitting the first
/// `FINE_STEPS` steps. `limit` returns the largest stable step for a state,
/// `after` checks each new state, `record` stores it at every stored time
/// (including the first).
#[allow(clippy::too_many_arguments)]
pub fn march(
    times: &[f64],
    dt: f64,
    imex: &mut ColumnImex,
    state: &mut [Vec<f64>],
    explicit: &mut Explicit,
    bc: &BoundaryData,
    limit: &dyn Fn(&[Vec<f64>]) -> f64,
    after: &mut dyn FnMut(f64, &[Vec<f64>]) -> Result<()>,
    record: &mut dyn FnMut(&[Vec<f64>]),
) -> Result<()> {
    let steps = steps_between(times, dt)?;
    record(state);
    let mut done = 0;
    for (w, &m) in steps.iter().enumerate() {
        let mut t = times[w];
        for _ in 0..m {
            for sub in substeps(done, dt, FINE_STEPS, FINE_SPLIT) {
                let lim = limit(state);
                if sub > lim {
                    return Err(Error::Cfl { dt: sub, limit: lim });
                }
                imex.step(t, sub, state, explicit, bc)?;
                t += sub;
                after(t, state)?;
            }
            done += 1;
        }
        record(state);
    }
    Ok(())
}

/// Number of initial steps that are split into substeps, and the split.
pub const FINE_STEPS: usize = 5;
pub const FINE_SPLIT: usize = 10;

/// Number of steps of size `dt` between consecutive stored times.
pub fn steps_between(times: &[f64], dt: f64) -> Result<Vec<usize>> {
    times
        .windows(2)
        .map(|w| {
            let m = ((w[1] - w[0]) / dt).round();
            if m < 1.0 || (m * dt - (w[1] - w[0])).abs() > 1e-9 * (w[1] - w[0]) {
                Err(Error::Config(format!(
                    "dt={dt} does not divide the snapshot spacing {}",
                    w[1] - w[0]
                )))
            } else {
                Ok(m as usize)
            }
        })
        .collect()
}
