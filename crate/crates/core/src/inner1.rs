//! First-order linearised ideal MHD flow driven by the layer's wall data.

use crate::bl0::BLProfile0;
use crate::error::{Error, Result};
use crate::fields::time::cubic_weights;
use crate::fields::Grid;
use crate::inner0::{integrate, IdealMHDState, IdealOptions, InnerTrajectory};
use crate::potential::{Dynamics, Forcing, Kin, WallPotentials};
use num_complex::Complex64 as C;
use std::sync::Arc;

pub type InnerState1 = InnerTrajectory;

/// Time-indexed wall-normal data (v¹, g¹)(t, x, 0).
#[derive(Clone, Debug)]
pub struct WallData {
    pub times: Vec<f64>,
    pub v: Vec<Vec<f64>>,
    pub g: Vec<Vec<f64>>,
}

impl WallData {
    pub fn zeros(times: &[f64], nx: usize) -> Self {
        WallData {
            times: times.to_vec(),
            v: vec![vec![0.0; nx]; times.len()],
            g: vec![vec![0.0; nx]; times.len()],
        }
    }

    pub fn scaled(&self, a: f64) -> Self {
        let s = |f: &Vec<Vec<f64>>| f.iter().map(|r| r.iter().map(|v| a * v).collect()).collect();
        WallData { times: self.times.clone(), v: s(&self.v), g: s(&self.g) }
    }

    pub fn plus(&self, o: &WallData) -> Self {
        let s = |a: &Vec<Vec<f64>>, b: &Vec<Vec<f64>>| {
            a.iter().zip(b).map(|(r, q)| r.iter().zip(q).map(|(x, y)| x + y).collect()).collect()
        };
        WallData { times: self.times.clone(), v: s(&self.v, &o.v), g: s(&self.g, &o.g) }
    }

    pub fn max_abs(&self) -> f64 {
        self.v.iter().chain(&self.g).flatten().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// (v¹, g¹)|_{y=0} = −(v_b⁰, g_b⁰)|_{η=0}.
pub fn bc_from_profile0(profile: &BLProfile0) -> WallData {
    let neg = |f: &Vec<Vec<f64>>| f.iter().map(|r| r.iter().map(|v| -v).collect()).collect();
    WallData {
        times: profile.times.clone(),
        v: neg(&profile.vb_wall),
        g: neg(&profile.gb_wall),
    }
}

/// Wall potentials at the data's nodes, interpolated cubically in time.
struct WallSeries {
    times: Vec<f64>,
    nodes: Vec<WallPotentials>,
}

impl WallSeries {
    fn new(grid: &Grid, w: &WallData) -> Result<Self> {
        let zero = vec![0.0; grid.nx];
        let nodes = w
            .v
            .iter()
            .zip(&w.g)
            .map(|(v, g)| WallPotentials::from_normal_data(grid, v, g, &zero))
            .collect::<Result<Vec<_>>>()?;
        Ok(WallSeries { times: w.times.clone(), nodes })
    }

    fn at(&self, t: f64) -> WallPotentials {
        let (s, w, dw) = cubic_weights(&self.times, t);
        let nx = self.nodes[0].psi.len();
        let mut out = WallPotentials::zeros(nx);
        for k in 0..w.len() {
            let n = &self.nodes[s + k];
            for i in 0..nx {
                out.psi[i] += n.psi[i] * w[k];
                out.a[i] += n.a[i] * w[k];
                out.dpsi[i] += n.psi[i] * dw[k];
            }
        }
        out
    }
}

/// Solve the linearisation about `background` with zero initial data and
/// prescribed wall-normal data.
pub fn solve_linearized_mhd(
    background: &IdealMHDState,
    wall: &WallData,
    t_end: f64,
    grid: &Arc<Grid>,
    dt: f64,
) -> Result<InnerState1> {
    solve_linearized_mhd_with(background, wall, t_end, grid, dt, &IdealOptions::default(), None)
}

pub fn solve_linearized_mhd_with(
    background: &IdealMHDState,
    wall: &WallData,
    t_end: f64,
    grid: &Arc<Grid>,
    dt: f64,
    opts: &IdealOptions,
    forcing: Option<Forcing>,
) -> Result<InnerState1> {
    if !background.grid.same_shape(grid) {
        return Err(Error::Shape("background not on the solver grid".into()));
    }
    let covers = |ts: &[f64]| ts[0] <= 1e-12 && *ts.last().unwrap() >= t_end - 1e-12;
    if !covers(&background.times) || !covers(&wall.times) {
        return Err(Error::TimeWindow(format!(
            "background or wall data does not cover [0, {t_end}]"
        )));
    }
    let series = WallSeries::new(grid, wall)?;
    let wall_fn = |t: f64| series.at(t);
    let bg = |t: f64| background.phys_at(t);
    let kin0 = Kin::zeros(grid.nx, grid.ny);
    let mut traj = integrate(grid, &kin0, t_end, dt, opts, Dynamics::Linear(&bg), &wall_fn, forcing)?;
    // Zero initial data is exact.
    let z = C::new(0.0, 0.0);
    debug_assert!(Kin::from_flat(&traj.kin[0], grid.nx, grid.ny).a.iter().all(|v| *v == z));
    traj.t1 = None;
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::Stretching;
    use crate::inner0::{solve_ideal_mhd, Preset, WaveSpec};

    fn setup() -> (Arc<Grid>, IdealMHDState) {
        let g = Grid::physical(16, 96, 8.0, Stretching::Tanh { beta: 1.5 }).unwrap();
        let s0 = Preset::NumericalInner(WaveSpec { u_amp: 0.1, h_base: 1.0, h_amp: 0.1 })
            .initial_state(&g);
        let bg = solve_ideal_mhd(&s0, 0.5, &g, 0.01).unwrap();
        (g, bg)
    }

    fn data(times: &[f64], nx: usize, c: f64) -> WallData {
        let x: Vec<f64> = (0..nx).map(|i| 2.0 * std::f64::consts::PI * i as f64 / nx as f64).collect();
        WallData {
            times: times.to_vec(),
            v: times.iter().map(|t| x.iter().map(|x| -c * (x + t).cos() * t).collect()).collect(),
            g: times.iter().map(|t| x.iter().map(|x| 0.3 * c * (2.0 * x).sin() * t * t).collect()).collect(),
        }
    }

    fn flat(s: &InnerState1) -> Vec<f64> {
        s.states
            .iter()
            .flat_map(|st| {
                st.u.values.iter().chain(&st.v.values).chain(&st.h.values).chain(&st.g.values).cloned().collect::<Vec<_>>()
            })
            .collect()
    }

    fn rel(a: &[f64], b: &[f64]) -> f64 {
        let d = a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
        d / b.iter().fold(1e-300f64, |m, y| m.max(y.abs()))
    }

    #[test]
    fn zero_data_gives_zero() {
        let (g, bg) = setup();
        let w = WallData::zeros(&bg.times, 16);
        let s = solve_linearized_mhd(&bg, &w, 0.5, &g, 0.01).unwrap();
        assert!(flat(&s).iter().all(|v| v.abs() <= 1e-12));
    }

    #[test]
    fn linearity_and_superposition() {
        let (g, bg) = setup();
        let d1 = data(&bg.times, 16, 0.1);
        let d2 = WallData { g: d1.v.clone(), v: d1.g.iter().map(|r| r.iter().map(|v| v * 0.0).collect()).collect(), times: d1.times.clone() };
        let base = flat(&solve_linearized_mhd(&bg, &d1, 0.5, &g, 0.01).unwrap());
        assert!(base.iter().any(|v| v.abs() > 1e-4));
        for a in [-1.0, 2.0, 10.0] {
            let s = flat(&solve_linearized_mhd(&bg, &d1.scaled(a), 0.5, &g, 0.01).unwrap());
            let scaled: Vec<f64> = base.iter().map(|v| a * v).collect();
            assert!(rel(&s, &scaled) <= 1e-10, "alpha {a}");
        }
        let s2 = flat(&solve_linearized_mhd(&bg, &d2, 0.5, &g, 0.01).unwrap());
        let s12 = flat(&solve_linearized_mhd(&bg, &d1.plus(&d2), 0.5, &g, 0.01).unwrap());
        let sum: Vec<f64> = base.iter().zip(&s2).map(|(a, b)| a + b).collect();
        assert!(rel(&s12, &sum) <= 1e-10);
    }

    #[test]
    fn uniform_background_imposes_trace() {
        let g = Grid::physical(16, 96, 8.0, Stretching::Tanh { beta: 1.5 }).unwrap();
        let s0 = Preset::UniformField { c: 1.0 }.initial_state(&g);
        let bg = solve_ideal_mhd(&s0, 0.5, &g, 0.01).unwrap();
        let ts = &bg.times;
        let w = WallData {
            times: ts.clone(),
            v: ts.iter().map(|_| g.x.iter().map(|x| -x.cos()).collect()).collect(),
            g: vec![vec![0.0; 16]; ts.len()],
        };
        let s = solve_linearized_mhd(&bg, &w, 0.5, &g, 0.01).unwrap();
        for (k, st) in s.states.iter().enumerate() {
            for i in 0..16 {
                assert!((st.v.values[i] - w.v[k][i]).abs() <= 1e-10);
                assert!(st.g.values[i].abs() <= 1e-10);
            }
            let tol = 10.0 * (st.div_velocity(4).unwrap().max_abs() - st.div_velocity(2).unwrap().max_abs()).abs() + 1e-10;
            assert!(st.div_velocity(4).unwrap().max_abs() <= tol.max(1e-10));
        }
    }

    #[test]
    fn wall_data_from_profile() {
        let g = Grid::layer(16, 801, 30.0).unwrap();
        let ts = [0.0, 0.1, 0.2];
        let ub: Vec<Vec<f64>> = ts
            .iter()
            .map(|_| (0..g.len()).map(|q| g.x[q % 16].sin() * (-g.y[q / 16]).exp()).collect())
            .collect();
        let p = BLProfile0::from_tangential(&g, &ts, ub, vec![vec![0.0; g.len()]; 3]);
        let w = bc_from_profile0(&p);
        for i in 0..16 {
            assert!((w.v[1][i] + g.x[i].cos()).abs() < 2e-4);
            assert_eq!(w.g[1][i], 0.0);
        }
        let z = bc_from_profile0(&BLProfile0::zeros(&g, &ts));
        assert_eq!(z.max_abs(), 0.0);
    }
}
