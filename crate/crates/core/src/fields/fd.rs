//! Finite-difference weights on nonuniform nodes.

/// Fornberg's recursion: weights `c[k][j]` for the k-th derivative at `z`
/// using nodes `x[j]`, for k = 0..=m.
pub fn fornberg(z: f64, x: &[f64], m: usize) -> Vec<Vec<f64>> {
    let n = x.len();
    let mut c = vec![vec![0.0; n]; m + 1];
    let mut c1 = 1.0;
    let mut c4 = x[0] - z;
    c[0][0] = 1.0;
    for i in 1..n {
        let mn = i.min(m);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = x[i] - z;
        for j in 0..i {
            let c3 = x[i] - x[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[k][i] = c1 * (k as f64 * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
                }
                c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
            }
            for k in (1..=mn).rev() {
                c[k][j] = (c4 * c[k][j] - k as f64 * c[k - 1][j]) / c3;
            }
            c[0][j] = c4 * c[0][j] / c3;
        }
        c1 = c2;
    }
    c
}

#[derive(Clone, Debug)]
pub struct Stencil {
    pub start: usize,
    pub w: Vec<f64>,
}

/// A banded differentiation operator along y: one stencil per row.
#[derive(Clone, Debug)]
pub struct FdOp {
    pub rows: Vec<Stencil>,
}

impl FdOp {
    /// Derivative `deriv` (1 or 2) of formal order `order` (2 or 4).
    /// Interior rows are centred; rows within half a stencil of either end
    /// use one-sided stencils one point wider.
    pub fn new(y: &[f64], deriv: usize, order: usize) -> FdOp {
        let n = y.len();
        let w_int = order + 1;
        let half = w_int / 2;
        let w_bnd = (order + deriv).min(n);
        let rows = (0..n)
            .map(|j| {
                let (start, width) = if j >= half && j + half < n {
                    (j - half, w_int)
                } else if j < half {
                    (0, w_bnd)
                } else {
                    (n - w_bnd, w_bnd)
                };
                let c = fornberg(y[j], &y[start..start + width], deriv);
                Stencil {
                    start,
                    w: c[deriv].clone(),
                }
            })
            .collect();
        FdOp { rows }
    }

    pub fn width_needed(deriv: usize, order: usize) -> usize {
        (order + 1).max(order + deriv)
    }

    /// Lower/upper bandwidth of the operator as a matrix.
    pub fn bandwidth(&self) -> (usize, usize) {
        let mut kl = 0;
        let mut ku = 0;
        for (j, s) in self.rows.iter().enumerate() {
            kl = kl.max(j.saturating_sub(s.start));
            ku = ku.max((s.start + s.w.len() - 1).saturating_sub(j));
        }
        (kl, ku)
    }

    #[inline]
    pub fn row_dot<T>(&self, j: usize, f: &[T]) -> T
    where
        T: Copy + std::ops::Add<Output = T> + std::ops::Mul<f64, Output = T> + Default,
    {
        let s = &self.rows[j];
        let mut acc = T::default();
        for (m, &w) in s.w.iter().enumerate() {
            acc = acc + f[s.start + m] * w;
        }
        acc
    }

    /// Apply to a single column of length ny.
    pub fn apply_col<T>(&self, f: &[T]) -> Vec<T>
    where
        T: Copy + std::ops::Add<Output = T> + std::ops::Mul<f64, Output = T> + Default,
    {
        (0..self.rows.len()).map(|j| self.row_dot(j, f)).collect()
    }

    /// Apply along y to an array laid out with x fastest (`nx` columns).
    pub fn apply<T>(&self, f: &[T], nx: usize) -> Vec<T>
    where
        T: Copy + std::ops::Add<Output = T> + std::ops::Mul<f64, Output = T> + Default,
    {
        let ny = self.rows.len();
        let mut out = vec![T::default(); nx * ny];
        for (j, s) in self.rows.iter().enumerate() {
            let o = &mut out[j * nx..(j + 1) * nx];
            for (m, &w) in s.w.iter().enumerate() {
                let src = &f[(s.start + m) * nx..(s.start + m + 1) * nx];
                for i in 0..nx {
                    o[i] = o[i] + src[i] * w;
                }
            }
        }
        out
    }

    /// Value of row `j` applied at column `i` of an x-fastest array.
    #[inline]
    pub fn at(&self, f: &[f64], nx: usize, i: usize, j: usize) -> f64 {
        let s = &self.rows[j];
        s.w.iter()
            .enumerate()
            .map(|(m, &w)| w * f[(s.start + m) * nx + i])
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fornberg_uniform_central() {
        let c = fornberg(0.0, &[-1.0, 0.0, 1.0], 2);
        assert!((c[1][0] + 0.5).abs() < 1e-15 && (c[1][2] - 0.5).abs() < 1e-15);
        assert!((c[2][0] - 1.0).abs() < 1e-15 && (c[2][1] + 2.0).abs() < 1e-15);
    }

    #[test]
    fn one_sided_three_point() {
        let c = fornberg(0.0, &[0.0, 1.0, 2.0], 1);
        assert!((c[1][0] + 1.5).abs() < 1e-15);
        assert!((c[1][1] - 2.0).abs() < 1e-15);
        assert!((c[1][2] + 0.5).abs() < 1e-15);
    }

    #[test]
    fn exact_on_polynomials() {
        let y: Vec<f64> = (0..12).map(|j| (j as f64 * 0.3).powf(1.3)).collect();
        let d1 = FdOp::new(&y, 1, 4);
        let d2 = FdOp::new(&y, 2, 4);
        let f: Vec<f64> = y.iter().map(|&t| t.powi(3) - 2.0 * t).collect();
        let a = d1.apply_col(&f);
        let b = d2.apply_col(&f);
        for j in 0..y.len() {
            assert!((a[j] - (3.0 * y[j] * y[j] - 2.0)).abs() < 1e-9);
            assert!((b[j] - 6.0 * y[j]).abs() < 1e-8);
        }
    }
}
