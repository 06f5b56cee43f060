//! Coefficient fields a^p, b^p of the leading layer, the stream function of
//! the magnetic remainder, the unknown transformation and its inverse, and
//! the symmetrizer positivity checks.

use crate::assembler::Lift;
use crate::bl0::BLState0;
use crate::cutoff::CutoffChi;
use crate::error::{Error, Result};
use crate::fields::time::interp_dt;
use crate::fields::{cumulative_integral_raw, l2_raw, Grid};
use std::io::Write;
use std::path::Path;
use std::sync::Arc;

/// Magnetic divergence defect above which `stream_function` warns.
pub const DIVERGENCE_WARN: f64 = 1e-6;

/// a^p = χ(y)u^p/h^p and b^p = ε^{-1/2}∂_η h^p/h^p on the physical grid.
#[derive(Clone, Debug)]
pub struct CoefficientFields {
    pub grid: Arc<Grid>,
    pub eps: f64,
    pub times: Vec<f64>,
    pub ap: Vec<Vec<f64>>,
    pub bp: Vec<Vec<f64>>,
}

impl CoefficientFields {
    /// Coefficients at stored index `k`.
    pub fn snapshot(&self, k: usize) -> Coefficients<'_> {
        Coefficients { grid: &self.grid, ap: &self.ap[k], bp: &self.bp[k] }
    }

    /// Largest |a^p| at each stored time.
    pub fn sup_ap(&self) -> Vec<f64> {
        self.ap.iter().map(|a| a.iter().fold(0.0f64, |m, v| m.max(v.abs()))).collect()
    }
}

/// Coefficients at one time.
#[derive(Clone, Copy, Debug)]
pub struct Coefficients<'a> {
    pub grid: &'a Arc<Grid>,
    pub ap: &'a [f64],
    pub bp: &'a [f64],
}

/// Evaluate a^p, b^p from the leading layer state on `grid`.
///
/// Beyond the layer's Lη the profiles take their top values and ∂_η h^p is
/// zero. Fails when min h^p falls below δ₀/2, the standing positivity
/// assumption of the layer problem.
pub fn compute_ap_bp(state: &BLState0, eps: f64, chi: &CutoffChi, grid: &Arc<Grid>) -> Result<CoefficientFields> {
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(Error::Config(format!("eps must lie in (0, 1], got {eps}")));
    }
    let lg = &state.grid;
    if lg.nx != grid.nx {
        return Err(Error::Shape(format!("layer nx {} differs from grid nx {}", lg.nx, grid.nx)));
    }
    let bound = 0.5 * state.delta0;
    let nx = lg.nx;
    for (k, hp) in state.hp.iter().enumerate() {
        if let Some((q, &value)) = hp.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1)) {
            if value < bound {
                return Err(Error::Positivity { time: state.times[k], ix: q % nx, ieta: q / nx, value, bound });
            }
        }
    }
    let se = eps.sqrt();
    let lift = Lift::new(grid, lg, se);
    let chi_rows: Vec<f64> = grid.y.iter().map(|&y| chi.value(y)).collect();
    let mut ap = Vec::with_capacity(state.times.len());
    let mut bp = Vec::with_capacity(state.times.len());
    for k in 0..state.times.len() {
        let u = lift.apply(&state.up[k], true);
        let h = lift.apply(&state.hp[k], true);
        let he = lift.apply(&lg.d1().apply(&state.hp[k], nx), false);
        let mut a = vec![0.0; grid.len()];
        let mut b = vec![0.0; grid.len()];
        for (q, (av, bv)) in a.iter_mut().zip(b.iter_mut()).enumerate() {
            *av = chi_rows[q / nx] * u[q] / h[q];
            *bv = he[q] / (se * h[q]);
        }
        ap.push(a);
        bp.push(b);
    }
    Ok(CoefficientFields { grid: grid.clone(), eps, times: state.times.clone(), ap, bp })
}

/// ψ with h = ∂_yψ, ψ|_{y=0} = 0, and the check g = −∂_xψ.
#[derive(Clone, Debug)]
pub struct StreamFunction {
    pub psi: Vec<f64>,
    /// max |g + ∂_xψ|.
    pub residual: f64,
    /// max |∂_x h + ∂_y g| of the input.
    pub divergence: f64,
}

/// ψ(x, y) = ∫₀^y h(x, s) ds by the trapezoidal rule.
pub fn stream_function(grid: &Grid, h: &[f64], g: &[f64]) -> Result<StreamFunction> {
    if h.len() != grid.len() || g.len() != grid.len() {
        return Err(Error::Shape("stream_function inputs not on the grid".into()));
    }
    let fr = &grid.fourier;
    let div: Vec<f64> = fr.dx(h).iter().zip(grid.d1().apply(g, grid.nx)).map(|(a, b)| a + b).collect();
    let divergence = div.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if divergence > DIVERGENCE_WARN {
        log::warn!("stream_function: magnetic divergence defect {divergence:.3e}");
    }
    let psi = cumulative_integral_raw(h, grid);
    let residual = fr.dx(&psi).iter().zip(g).fold(0.0f64, |m, (a, b)| m.max((a + b).abs()));
    Ok(StreamFunction { psi, residual, divergence })
}

/// The four components of a remainder or of its transform.
#[derive(Clone, Debug, PartialEq)]
pub struct Fields4 {
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub h: Vec<f64>,
    pub g: Vec<f64>,
}

impl Fields4 {
    pub fn zeros(n: usize) -> Fields4 {
        Fields4 { u: vec![0.0; n], v: vec![0.0; n], h: vec![0.0; n], g: vec![0.0; n] }
    }

    pub fn components(&self) -> [&Vec<f64>; 4] {
        [&self.u, &self.v, &self.h, &self.g]
    }

    /// L² norm of the stacked components.
    pub fn l2(&self, grid: &Grid) -> f64 {
        self.components().iter().map(|c| l2_raw(c, grid).powi(2)).sum::<f64>().sqrt()
    }

    /// Largest componentwise difference relative to the largest entry of `self`.
    pub fn relative_diff(&self, other: &Fields4) -> f64 {
        let (mut d, mut m) = (0.0f64, 0.0f64);
        for (a, b) in self.components().iter().zip(other.components()) {
            for (x, y) in a.iter().zip(b) {
                d = d.max((x - y).abs());
                m = m.max(x.abs());
            }
        }
        if m > 0.0 {
            d / m
        } else {
            d
        }
    }

    pub fn map(&self, f: impl Fn(&[f64]) -> Vec<f64>) -> Fields4 {
        Fields4 { u: f(&self.u), v: f(&self.v), h: f(&self.h), g: f(&self.g) }
    }
}

/// U = (ũ, ṽ, h̃, g̃) with the ψ it was built from.
#[derive(Clone, Debug)]
pub struct TransformedState {
    pub fields: Fields4,
    pub psi: Vec<f64>,
}

/// ∂_y(a^pψ) and ∂_x(a^pψ). Taking both derivatives of the same product
/// makes the divergence change vanish up to the commutation of the x and y
/// operators, which act on different indices.
fn flux(c: &Coefficients<'_>, psi: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let g = c.grid;
    let a_psi: Vec<f64> = c.ap.iter().zip(psi).map(|(a, p)| a * p).collect();
    (g.d1().apply(&a_psi, g.nx), g.fourier.dx(&a_psi))
}

fn check_shapes(c: &Coefficients<'_>, f: &Fields4, psi: &[f64]) -> Result<()> {
    let n = c.grid.len();
    let ok = c.ap.len() == n && c.bp.len() == n && psi.len() == n && f.components().iter().all(|v| v.len() == n);
    if ok {
        Ok(())
    } else {
        Err(Error::Shape("transform inputs not on a common grid".into()))
    }
}

/// ũ = u − ∂_y(a^pψ), ṽ = v + ∂_x(a^pψ), h̃ = h − b^pψ, g̃ = g.
pub fn transform(rem: &Fields4, psi: &[f64], c: &Coefficients<'_>) -> Result<TransformedState> {
    check_shapes(c, rem, psi)?;
    let (fy, fx) = flux(c, psi);
    let fields = Fields4 {
        u: rem.u.iter().zip(&fy).map(|(u, d)| u - d).collect(),
        v: rem.v.iter().zip(&fx).map(|(v, d)| v + d).collect(),
        h: rem.h.iter().zip(c.bp).zip(psi).map(|((h, b), p)| h - b * p).collect(),
        g: rem.g.clone(),
    };
    Ok(TransformedState { fields, psi: psi.to_vec() })
}

/// Inverse of `transform` for the same ψ and coefficients.
///
/// With ∂_yψ = h this is u = ũ + a^p h̃ + (∂_y a^p + a^p b^p)ψ and
/// v = ṽ + a^p g̃ − ∂_x a^p ψ; see `inverse_transform_expanded`.
pub fn inverse_transform(state: &TransformedState, c: &Coefficients<'_>) -> Result<Fields4> {
    let (f, psi) = (&state.fields, &state.psi);
    check_shapes(c, f, psi)?;
    let (fy, fx) = flux(c, psi);
    Ok(Fields4 {
        u: f.u.iter().zip(&fy).map(|(u, d)| u + d).collect(),
        v: f.v.iter().zip(&fx).map(|(v, d)| v - d).collect(),
        h: f.h.iter().zip(c.bp).zip(psi).map(|((h, b), p)| h + b * p).collect(),
        g: f.g.clone(),
    })
}

/// The inversion written with h̃ and g̃ in place of ∂_yψ and −∂_xψ. Agrees
/// with `inverse_transform` to the accuracy of the stream-function quadrature.
pub fn inverse_transform_expanded(state: &TransformedState, c: &Coefficients<'_>) -> Result<Fields4> {
    let (f, psi) = (&state.fields, &state.psi);
    check_shapes(c, f, psi)?;
    let g = c.grid;
    let ay = g.d1().apply(c.ap, g.nx);
    let ax = g.fourier.dx(c.ap);
    let n = g.len();
    let mut out = Fields4::zeros(n);
    for q in 0..n {
        let (a, b, p) = (c.ap[q], c.bp[q], psi[q]);
        out.u[q] = f.u[q] + a * f.h[q] + (ay[q] + a * b) * p;
        out.v[q] = f.v[q] + a * f.g[q] - ax[q] * p;
        out.h[q] = f.h[q] + b * p;
        out.g[q] = f.g[q];
    }
    Ok(out)
}

/// Largest ‖∂^α(u,v,h,g)‖ / Σ_{β≤α}‖∂^β U‖ over multi-indices (α_t, α_x)
/// with α_t ≤ 1 and α_t + α_x ≤ `max_order`, per stored time.
///
/// Time derivatives come from the cubic interpolant of the snapshots, which
/// needs at least two of them; with one snapshot only α_t = 0 is used.
pub fn domination_constants(grid: &Grid, times: &[f64], original: &[Fields4], transformed: &[Fields4], max_order: usize) -> Result<Vec<f64>> {
    if times.is_empty() {
        return Err(Error::NoData);
    }
    if original.len() != times.len() || transformed.len() != times.len() {
        return Err(Error::Shape("one snapshot per time expected".into()));
    }
    let fr = &grid.fourier;
    let series = |s: &[Fields4], c: usize| -> Vec<Vec<f64>> { s.iter().map(|f| f.components()[c].clone()).collect() };
    let orig: Vec<Vec<Vec<f64>>> = (0..4).map(|c| series(original, c)).collect();
    let tran: Vec<Vec<Vec<f64>>> = (0..4).map(|c| series(transformed, c)).collect();
    let max_t = if times.len() >= 2 { 1.min(max_order) } else { 0 };
    // norms[k][at][ax] of the stacked components.
    let norm = |data: &[Vec<Vec<f64>>], k: usize, at: usize, ax: usize| -> f64 {
        (0..4)
            .map(|c| {
                let base = if at == 0 { data[c][k].clone() } else { interp_dt(times, &data[c], times[k]) };
                let d = if ax == 0 { base } else { fr.dx_n(&base, ax as u32) };
                l2_raw(&d, grid).powi(2)
            })
            .sum::<f64>()
            .sqrt()
    };
    let mut out = Vec::with_capacity(times.len());
    for k in 0..times.len() {
        let mut lhs = vec![vec![0.0; max_order + 1]; max_t + 1];
        let mut rhs = vec![vec![0.0; max_order + 1]; max_t + 1];
        for at in 0..=max_t {
            for ax in 0..=(max_order - at) {
                lhs[at][ax] = norm(&orig, k, at, ax);
                rhs[at][ax] = norm(&tran, k, at, ax);
            }
        }
        let mut c = 0.0f64;
        for at in 0..=max_t {
            for ax in 0..=(max_order - at) {
                let sum: f64 = (0..=at).flat_map(|bt| (0..=ax).map(move |bx| (bt, bx))).map(|(bt, bx)| rhs[bt][bx]).sum();
                if sum > 0.0 {
                    c = c.max(lhs[at][ax] / sum);
                }
            }
        }
        out.push(c);
    }
    Ok(out)
}

/// c_δ = ((μ−κ)² + 4δ(μ−δ)) / ((μ+κ)² − 4δκ).
pub fn c_delta(mu: f64, kappa: f64, delta: f64) -> f64 {
    ((mu - kappa).powi(2) + 4.0 * delta * (mu - delta)) / ((mu + kappa).powi(2) - 4.0 * delta * kappa)
}

/// Bound on sup (a^p)²: 4(μ−δ)(κ−δ) / ((μ+κ)² − 4δκ).
pub fn smallness_bound(mu: f64, kappa: f64, delta: f64) -> f64 {
    4.0 * (mu - delta) * (kappa - delta) / ((mu + kappa).powi(2) - 4.0 * delta * kappa)
}

/// Smallest eigenvalue of the symmetric part of SB at one point. SB acts on
/// (x₁, x₃) and (x₂, x₄) by the same 2×2 block [[μ, (μ−κ)a], [0, κ(1−a²)]].
pub fn sb_min_eigenvalue(mu: f64, kappa: f64, a: f64) -> f64 {
    let p = mu;
    let q = kappa * (1.0 - a * a);
    let r = 0.5 * (mu - kappa) * a;
    0.5 * (p + q) - (0.25 * (p - q).powi(2) + r * r).sqrt()
}

/// Per-time symmetrizer data.
#[derive(Clone, Debug, PartialEq)]
pub struct SymmetrizerRow {
    pub time: f64,
    pub sup_ap: f64,
    /// min (1 − (a^p)²) − c_δ.
    pub c_delta_margin: f64,
    pub min_sb_eig: f64,
    pub smallness_holds: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SymmetrizerReport {
    pub ok: bool,
    pub c_delta: f64,
    pub min_sb_eig: f64,
    /// First stored time at which the smallness condition fails, or the last
    /// stored time when it holds throughout.
    pub t_delta_estimate: f64,
    pub rows: Vec<SymmetrizerRow>,
}

/// Check the smallness condition on a^p, the lower bound c_δ on 1 − (a^p)²,
/// and sym(SB) ≥ δ, at every stored time and grid point.
pub fn check_symmetrizer(coeffs: &CoefficientFields, mu: f64, kappa: f64, delta: f64) -> Result<SymmetrizerReport> {
    if !(mu > 0.0 && kappa > 0.0 && delta > 0.0 && delta < mu.min(kappa)) {
        return Err(Error::Config(format!("need mu, kappa, delta > 0 and delta < min(mu, kappa); got {mu}, {kappa}, {delta}")));
    }
    if coeffs.times.is_empty() {
        return Err(Error::NoData);
    }
    let cd = c_delta(mu, kappa, delta);
    let bound = smallness_bound(mu, kappa, delta);
    let mut rows = Vec::with_capacity(coeffs.times.len());
    for (k, &time) in coeffs.times.iter().enumerate() {
        let a = &coeffs.ap[k];
        let sup_ap = a.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let min_s = a.iter().fold(f64::INFINITY, |m, v| m.min(1.0 - v * v));
        let min_sb_eig = a.iter().fold(f64::INFINITY, |m, &v| m.min(sb_min_eigenvalue(mu, kappa, v)));
        rows.push(SymmetrizerRow { time, sup_ap, c_delta_margin: min_s - cd, min_sb_eig, smallness_holds: sup_ap * sup_ap <= bound });
    }
    let t_delta_estimate = rows.iter().find(|r| !r.smallness_holds).map_or(coeffs.times[coeffs.times.len() - 1], |r| r.time);
    let min_sb_eig = rows.iter().fold(f64::INFINITY, |m, r| m.min(r.min_sb_eig));
    let ok = rows.iter().all(|r| r.smallness_holds && r.c_delta_margin >= 0.0) && min_sb_eig >= delta;
    Ok(SymmetrizerReport { ok, c_delta: cd, min_sb_eig, t_delta_estimate, rows })
}

/// CSV with columns time,sup_ap,c_delta_margin,min_sb_eig,domination_constant.
pub fn write_diagnostics_csv(path: &Path, report: &SymmetrizerReport, domination: &[f64]) -> Result<()> {
    if domination.len() != report.rows.len() {
        return Err(Error::Shape("one domination constant per time expected".into()));
    }
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "time,sup_ap,c_delta_margin,min_sb_eig,domination_constant")?;
    for (r, c) in report.rows.iter().zip(domination) {
        writeln!(f, "{},{:e},{:e},{:e},{:e}", r.time, r.sup_ap, r.c_delta_margin, r.min_sb_eig, c)?;
    }
    f.flush()?;
    Ok(())
}
