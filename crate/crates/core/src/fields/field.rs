use super::banded::BandMatrix;
use super::grid::Grid;
use crate::error::{Error, Result};
use num_complex::Complex64;
use std::sync::Arc;

pub const SOLVABILITY_TOL: f64 = 1e-8;
pub const TAIL_TOL: f64 = 1e-8;

#[derive(Clone, Debug)]
pub struct ScalarField {
    pub grid: Arc<Grid>,
    /// Indexed `ix + nx * iy`.
    pub values: Vec<f64>,
    pub quantity: String,
}

impl ScalarField {
    pub fn new(grid: Arc<Grid>, values: Vec<f64>, quantity: &str) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Shape(format!(
                "{quantity}: {} values for a {}x{} grid",
                values.len(),
                grid.nx,
                grid.ny
            )));
        }
        let f = ScalarField {
            grid,
            values,
            quantity: quantity.to_string(),
        };
        f.check_finite()?;
        Ok(f)
    }

    pub fn zeros(grid: Arc<Grid>, quantity: &str) -> Self {
        let n = grid.len();
        ScalarField {
            grid,
            values: vec![0.0; n],
            quantity: quantity.to_string(),
        }
    }

    pub fn from_fn(grid: Arc<Grid>, quantity: &str, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut values = Vec::with_capacity(grid.len());
        for j in 0..grid.ny {
            for i in 0..grid.nx {
                values.push(f(grid.x[i], grid.y[j]));
            }
        }
        ScalarField {
            grid,
            values,
            quantity: quantity.to_string(),
        }
    }

    #[inline]
    pub fn at(&self, ix: usize, iy: usize) -> f64 {
        self.values[ix + self.grid.nx * iy]
    }

    pub fn row(&self, iy: usize) -> &[f64] {
        let nx = self.grid.nx;
        &self.values[iy * nx..(iy + 1) * nx]
    }

    pub fn check_finite(&self) -> Result<()> {
        let nx = self.grid.nx;
        match self.values.iter().position(|v| !v.is_finite()) {
            None => Ok(()),
            Some(k) => Err(Error::NonFinite {
                ix: k % nx,
                iy: k / nx,
                value: self.values[k],
            }),
        }
    }

    pub fn with_values(&self, values: Vec<f64>, quantity: &str) -> ScalarField {
        ScalarField {
            grid: self.grid.clone(),
            values,
            quantity: quantity.to_string(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn norms(&self) -> Norms<'_> {
        norms(self)
    }
}

#[derive(Clone, Debug)]
pub struct VectorState {
    pub u: ScalarField,
    pub v: ScalarField,
    pub h: ScalarField,
    pub g: ScalarField,
    pub p: Option<ScalarField>,
}

impl VectorState {
    pub fn new(
        u: ScalarField,
        v: ScalarField,
        h: ScalarField,
        g: ScalarField,
        p: Option<ScalarField>,
    ) -> Result<Self> {
        let gr = &u.grid;
        let same = |f: &ScalarField| Arc::ptr_eq(&f.grid, gr) || f.grid.same_shape(gr);
        if !(same(&v) && same(&h) && same(&g) && p.as_ref().map_or(true, same)) {
            return Err(Error::Shape("vector components on different grids".into()));
        }
        Ok(VectorState { u, v, h, g, p })
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.u.grid
    }

    /// Discrete ∂_x u + ∂_y v.
    pub fn div_velocity(&self, order: usize) -> Result<ScalarField> {
        divergence(&self.u, &self.v, order)
    }

    /// Discrete ∂_x h + ∂_y g.
    pub fn div_magnetic(&self, order: usize) -> Result<ScalarField> {
        divergence(&self.h, &self.g, order)
    }

    pub fn energy(&self) -> f64 {
        let e = |f: &ScalarField| f.norms().l2.powi(2);
        0.5 * (e(&self.u) + e(&self.v) + e(&self.h) + e(&self.g))
    }

    pub fn cross_helicity(&self) -> f64 {
        let gr = self.grid();
        let mut s = 0.0;
        for j in 0..gr.ny {
            for i in 0..gr.nx {
                let k = i + gr.nx * j;
                s += gr.wy[j]
                    * (self.u.values[k] * self.h.values[k] + self.v.values[k] * self.g.values[k]);
            }
        }
        s * gr.dx()
    }

    pub fn max_diff(&self, other: &VectorState) -> f64 {
        let d = |a: &ScalarField, b: &ScalarField| {
            a.values
                .iter()
                .zip(&b.values)
                .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
        };
        d(&self.u, &other.u)
            .max(d(&self.v, &other.v))
            .max(d(&self.h, &other.h))
            .max(d(&self.g, &other.g))
    }
}

pub fn divergence(a: &ScalarField, b: &ScalarField, order: usize) -> Result<ScalarField> {
    let ax = ddx(a)?;
    let by = ddy(b, order)?;
    let v = ax.values.iter().zip(&by.values).map(|(p, q)| p + q).collect();
    Ok(a.with_values(v, "divergence"))
}

/// Spectral x-derivative.
pub fn ddx(f: &ScalarField) -> Result<ScalarField> {
    f.check_finite()?;
    let v = f.grid.fourier.dx(&f.values);
    Ok(f.with_values(v, &format!("d_x {}", f.quantity)))
}

/// Finite-difference y-derivative of formal order 2 or 4.
pub fn ddy(f: &ScalarField, order: usize) -> Result<ScalarField> {
    let op = f.grid.op(1, order)?;
    let v = op.apply(&f.values, f.grid.nx);
    Ok(f.with_values(v, &format!("d_y {}", f.quantity)))
}

pub fn ddyy(f: &ScalarField, order: usize) -> Result<ScalarField> {
    let op = f.grid.op(2, order)?;
    let v = op.apply(&f.values, f.grid.nx);
    Ok(f.with_values(v, &format!("d_yy {}", f.quantity)))
}

/// Trapezoidal ∫_y^{L} f on each column, on raw x-fastest arrays.
pub fn tail_integral_raw(values: &[f64], grid: &Grid) -> Vec<f64> {
    let (nx, ny) = (grid.nx, grid.ny);
    let mut out = vec![0.0; nx * ny];
    for j in (0..ny - 1).rev() {
        let h = 0.5 * (grid.y[j + 1] - grid.y[j]);
        for i in 0..nx {
            out[i + nx * j] =
                out[i + nx * (j + 1)] + h * (values[i + nx * j] + values[i + nx * (j + 1)]);
        }
    }
    out
}

/// Trapezoidal ∫_0^y f on each column.
pub fn cumulative_integral_raw(values: &[f64], grid: &Grid) -> Vec<f64> {
    let (nx, ny) = (grid.nx, grid.ny);
    let mut out = vec![0.0; nx * ny];
    for j in 1..ny {
        let h = 0.5 * (grid.y[j] - grid.y[j - 1]);
        for i in 0..nx {
            out[i + nx * j] =
                out[i + nx * (j - 1)] + h * (values[i + nx * j] + values[i + nx * (j - 1)]);
        }
    }
    out
}

/// ∫_η^{Lη} f dη̃ with the tail beyond Lη taken as zero.
pub fn tail_integral(f: &ScalarField) -> ScalarField {
    let nx = f.grid.nx;
    let top = &f.values[nx * (f.grid.ny - 1)..];
    let worst = top.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if worst > TAIL_TOL {
        log::warn!(
            "tail_integral({}): |f(L)| = {worst:.3e} exceeds {TAIL_TOL:.0e}",
            f.quantity
        );
    }
    f.with_values(
        tail_integral_raw(&f.values, &f.grid),
        &format!("tail {}", f.quantity),
    )
}

pub fn cumulative_integral(f: &ScalarField) -> ScalarField {
    f.with_values(
        cumulative_integral_raw(&f.values, &f.grid),
        &format!("cumint {}", f.quantity),
    )
}

pub struct Norms<'a> {
    pub l2: f64,
    pub linf: f64,
    field: &'a ScalarField,
}

impl Norms<'_> {
    /// L² norm with weight (1 + y)^l.
    pub fn weighted_l2(&self, l: f64) -> f64 {
        let g = &self.field.grid;
        let mut s = 0.0;
        for j in 0..g.ny {
            let w = (1.0 + g.y[j]).powf(2.0 * l) * g.wy[j];
            for v in self.field.row(j) {
                s += w * v * v;
            }
        }
        (s * g.dx()).sqrt()
    }
}

pub fn norms(f: &ScalarField) -> Norms<'_> {
    Norms {
        l2: l2_raw(&f.values, &f.grid),
        linf: f.max_abs(),
        field: f,
    }
}

pub fn l2_raw(values: &[f64], grid: &Grid) -> f64 {
    let nx = grid.nx;
    let mut s = 0.0;
    for j in 0..grid.ny {
        let r: f64 = values[j * nx..(j + 1) * nx].iter().map(|v| v * v).sum();
        s += grid.wy[j] * r;
    }
    (s * grid.dx()).sqrt()
}

pub fn linf_raw(values: &[f64]) -> f64 {
    values.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Solve Δp = rhs with ∂_y p = wall_flux at y = 0.
///
/// Nonzero x-modes take p = 0 at y = L; the mean mode takes a homogeneous
/// Neumann condition at y = L, must satisfy the compatibility integral and
/// is returned with zero y-mean.
pub fn poisson_neumann(rhs: &ScalarField, wall_flux: &[f64]) -> Result<ScalarField> {
    poisson_neumann_with(rhs, wall_flux, SOLVABILITY_TOL)
}

pub fn poisson_neumann_with(
    rhs: &ScalarField,
    wall_flux: &[f64],
    solvability_tol: f64,
) -> Result<ScalarField> {
    let g = &rhs.grid;
    let (nx, ny) = (g.nx, g.ny);
    if wall_flux.len() != nx {
        return Err(Error::Shape(format!(
            "wall_flux has {} entries, expected {nx}",
            wall_flux.len()
        )));
    }
    rhs.check_finite()?;
    let d1 = g.op(1, 4)?;
    let d2 = g.op(2, 4)?;
    let fr = &g.fourier;
    let rh = fr.forward(&rhs.values);
    let fl = fr.forward(wall_flux);

    // Compatibility of the mean mode: ∫ rhs_0 dy = -flux_0.
    let integral: f64 = (0..ny).map(|j| g.wy[j] * rh[j * nx].re).sum();
    let scale = 1.0 + (0..ny).map(|j| g.wy[j] * rh[j * nx].re.abs()).sum::<f64>() + fl[0].re.abs();
    let defect = (integral + fl[0].re).abs() / scale;
    if defect > solvability_tol {
        return Err(Error::Solvability {
            defect,
            tol: solvability_tol,
        });
    }

    let (kl1, ku1) = d1.bandwidth();
    let (kl2, ku2) = d2.bandwidth();
    let (kl, ku) = (kl1.max(kl2), ku1.max(ku2));
    let mut out = vec![Complex64::new(0.0, 0.0); nx * ny];
    for i in 0..nx {
        let k = fr.wavenumber(i);
        let mut m = BandMatrix::zeros(ny, kl, ku);
        for (c, w) in d1.rows[0].w.iter().enumerate() {
            m.add(0, d1.rows[0].start + c, *w);
        }
        for j in 1..ny - 1 {
            let s = &d2.rows[j];
            for (c, w) in s.w.iter().enumerate() {
                m.add(j, s.start + c, *w);
            }
            m.add(j, j, -k * k);
        }
        m.set(ny - 1, ny - 1, 1.0);
        let lu = m.factor()?;
        let mut re = vec![0.0; ny];
        let mut im = vec![0.0; ny];
        re[0] = fl[i].re;
        im[0] = fl[i].im;
        for j in 1..ny - 1 {
            re[j] = rh[i + nx * j].re;
            im[j] = rh[i + nx * j].im;
        }
        lu.solve_in_place(&mut re);
        lu.solve_in_place(&mut im);
        if i == 0 {
            let mean: f64 = (0..ny).map(|j| g.wy[j] * re[j]).sum::<f64>() / g.length;
            re.iter_mut().for_each(|v| *v -= mean);
            im.iter_mut().for_each(|v| *v = 0.0);
        }
        for j in 0..ny {
            out[i + nx * j] = Complex64::new(re[j], im[j]);
        }
    }
    let p = fr.inverse(&out);
    Ok(rhs.with_values(p, "pressure"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::grid::Stretching;
    use std::f64::consts::PI;

    fn uniform(nx: usize, ny: usize, l: f64) -> Arc<Grid> {
        Grid::physical(nx, ny, l, Stretching::Uniform).unwrap()
    }

    #[test]
    fn ddx_of_product_matches_hand_derivative() {
        let g = uniform(64, 16, 2.0);
        let f = ScalarField::from_fn(g.clone(), "f", |x, y| (3.0 * x).sin() * x.cos() * (-y).exp());
        let d = ddx(&f).unwrap();
        let exact = ScalarField::from_fn(g, "e", |x, y| {
            (3.0 * (3.0 * x).cos() * x.cos() - (3.0 * x).sin() * x.sin()) * (-y).exp()
        });
        let err = d.values.iter().zip(&exact.values).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(err <= 1e-11, "{err}");
    }

    #[test]
    fn ddx_constant_is_zero() {
        let g = uniform(16, 8, 1.0);
        let f = ScalarField::from_fn(g, "c", |_, _| 3.0);
        assert!(ddx(&f).unwrap().max_abs() < 1e-14);
    }

    #[test]
    fn ddx_rejects_nan() {
        let g = uniform(8, 8, 1.0);
        let mut f = ScalarField::zeros(g, "f");
        f.values[13] = f64::NAN;
        match ddx(&f) {
            Err(Error::NonFinite { ix: 5, iy: 1, .. }) => {}
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn ddy_linear_exact() {
        for order in [2, 4] {
            let g = Grid::physical(8, 20, 3.0, Stretching::Tanh { beta: 2.0 }).unwrap();
            let f = ScalarField::from_fn(g, "y", |_, y| y);
            let d = ddy(&f, order).unwrap();
            assert!(d.values.iter().all(|v| (v - 1.0).abs() < 1e-12));
        }
    }

    fn ddy_err(ny: usize, order: usize) -> f64 {
        let g = uniform(8, ny, 2.0);
        let f = ScalarField::from_fn(g.clone(), "e", |_, y| (-y).exp());
        let d = ddy(&f, order).unwrap();
        d.values
            .iter()
            .zip(g.y.iter().flat_map(|y| std::iter::repeat(-(-y).exp()).take(8)))
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))
    }

    #[test]
    fn ddy_second_order_refinement() {
        let r = ddy_err(33, 2) / ddy_err(65, 2);
        assert!((r / 4.0 - 1.0).abs() <= 0.15, "ratio {r}");
    }

    #[test]
    fn ddy_measured_orders() {
        for order in [2usize, 4] {
            let p = (ddy_err(33, order) / ddy_err(65, order)).log2();
            assert!((p - order as f64).abs() <= 0.25, "order {order}: {p}");
        }
    }

    #[test]
    fn ddy_too_short() {
        let g = uniform(8, 8, 1.0);
        assert!(g.op(2, 4).is_ok());
        let f = ScalarField::zeros(g, "z");
        assert!(ddy(&f, 3).is_err());
    }

    #[test]
    fn tail_integral_exponential() {
        let g = Grid::layer(8, 3001, 30.0).unwrap();
        let f = ScalarField::from_fn(g.clone(), "e", |_, y| (-y).exp());
        let t = tail_integral(&f);
        let dh = g.deta();
        for j in (0..g.ny).step_by(97) {
            let exact = (-g.y[j]).exp();
            assert!((t.at(0, j) - exact).abs() <= (-30.0f64).exp() + dh * dh / 12.0 * 1.01);
        }
        let f2 = ScalarField::from_fn(g.clone(), "ye", |_, y| y * (-y).exp());
        let t2 = tail_integral(&f2);
        for j in (0..g.ny).step_by(97) {
            let y = g.y[j];
            assert!((t2.at(3, j) - (1.0 + y) * (-y).exp()).abs() < 1e-4);
        }
    }

    #[test]
    fn tail_then_derivative_recovers_minus_f() {
        let g = Grid::layer(8, 601, 30.0).unwrap();
        let f = ScalarField::from_fn(g.clone(), "f", |x, y| x.sin() * (-y).exp());
        let d = ddy(&tail_integral(&f), 2).unwrap();
        let dh = g.deta();
        for j in 1..g.ny - 1 {
            for i in 0..8 {
                assert!((d.at(i, j) + f.at(i, j)).abs() < dh * dh);
            }
        }
    }

    #[test]
    fn norms_of_constant_and_exponential() {
        let g = uniform(16, 11, 1.0);
        let f = ScalarField::from_fn(g, "one", |_, _| 1.0);
        assert!((f.norms().l2 - (2.0 * PI).sqrt()).abs() < 1e-12);
        let g = Grid::layer(16, 4001, 30.0).unwrap();
        let f = ScalarField::from_fn(g, "e", |_, y| (-y).exp());
        let n = f.norms();
        assert!((n.weighted_l2(0.0) / ((2.0 * PI).sqrt() / 2f64.sqrt()) - 1.0).abs() < 1e-4);
        assert!((n.l2 - n.weighted_l2(0.0)).abs() <= 1e-13 * n.l2);
        let z = ScalarField::zeros(Grid::layer(8, 9, 1.0).unwrap(), "z");
        let nz = z.norms();
        assert_eq!((nz.l2, nz.linf, nz.weighted_l2(2.0)), (0.0, 0.0, 0.0));
    }

    #[test]
    fn poisson_zero() {
        let g = uniform(8, 16, 1.0);
        let p = poisson_neumann(&ScalarField::zeros(g, "r"), &[0.0; 8]).unwrap();
        assert_eq!(p.max_abs(), 0.0);
    }

    #[test]
    fn poisson_incompatible_mean() {
        let g = uniform(8, 16, 1.0);
        let r = ScalarField::from_fn(g, "r", |_, _| 1.0);
        assert!(matches!(
            poisson_neumann(&r, &[0.0; 8]),
            Err(Error::Solvability { .. })
        ));
    }

    fn poisson_mms_err(ny: usize) -> (f64, f64, f64) {
        let ly = 2.0;
        let g = Grid::physical(16, ny, ly, Stretching::Tanh { beta: 1.5 }).unwrap();
        let a = PI / (2.0 * ly);
        let exact = ScalarField::from_fn(g.clone(), "p", |x, y| x.cos() * (a * y).cos());
        let rhs = exact.with_values(
            exact.values.iter().map(|v| -(1.0 + a * a) * v).collect(),
            "lap p",
        );
        let p = poisson_neumann(&rhs, &[0.0; 16]).unwrap();
        let err = p
            .values
            .iter()
            .zip(&exact.values)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        // residual of the discrete operator and the Neumann trace
        let lap: Vec<f64> = {
            let pxx = g.fourier.dx_n(&p.values, 2);
            let pyy = g.d2().apply(&p.values, 16);
            pxx.iter().zip(&pyy).map(|(a, b)| a + b).collect()
        };
        let mut res = 0.0f64;
        for j in 1..ny - 1 {
            for i in 0..16 {
                let k = i + 16 * j;
                res = res.max((lap[k] - rhs.values[k]).abs());
            }
        }
        let py = g.d1().apply(&p.values, 16);
        let trace = py[..16].iter().fold(0.0f64, |m, v| m.max(v.abs()));
        (err, res / (1.0 + a * a), trace)
    }

    #[test]
    fn poisson_manufactured() {
        let (e1, r1, t1) = poisson_mms_err(33);
        let (e2, _, _) = poisson_mms_err(65);
        assert!(e1 < 1e-4, "{e1}");
        assert!(e1 / e2 > 8.0, "{e1} {e2}");
        assert!(r1 < 1e-10, "{r1}");
        assert!(t1 < 1e-10, "{t1}");
    }
}
