//! Fields carried with their first two y-derivatives on a 2D grid.
//!
//! Products follow the Leibniz rule, x-derivatives are spectral on every
//! component, and `dy` shifts the components down. A component that is not
//! known is stored as NaN so any accidental use shows up in the result.

use crate::fields::spectral::Fourier;
use std::ops::{Add, Mul, Neg, Sub};

#[derive(Clone, Debug)]
pub struct Jet {
    pub f: Vec<f64>,
    pub y: Vec<f64>,
    pub yy: Vec<f64>,
}

fn zip(a: &[f64], b: &[f64], op: impl Fn(f64, f64) -> f64) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| op(*x, *y)).collect()
}

impl Jet {
    pub fn new(f: Vec<f64>, y: Vec<f64>, yy: Vec<f64>) -> Jet {
        Jet { f, y, yy }
    }

    /// Value only; derivatives unknown.
    pub fn value(f: Vec<f64>) -> Jet {
        let n = f.len();
        Jet { f, y: vec![f64::NAN; n], yy: vec![f64::NAN; n] }
    }

    pub fn constant(c: f64, n: usize) -> Jet {
        Jet { f: vec![c; n], y: vec![0.0; n], yy: vec![0.0; n] }
    }

    /// A function of x only, broadcast over `ny` rows.
    pub fn rows(row: &[f64], ny: usize) -> Jet {
        let f: Vec<f64> = (0..ny).flat_map(|_| row.iter().cloned()).collect();
        let n = f.len();
        Jet { f, y: vec![0.0; n], yy: vec![0.0; n] }
    }

    /// A function of y only, broadcast over `nx` columns, given with derivatives.
    pub fn columns(vals: &[[f64; 3]], nx: usize) -> Jet {
        let pick = |k: usize| vals.iter().flat_map(|v| std::iter::repeat(v[k]).take(nx)).collect();
        Jet { f: pick(0), y: pick(1), yy: pick(2) }
    }

    pub fn dx(&self, fr: &Fourier) -> Jet {
        Jet { f: fr.dx(&self.f), y: fr.dx(&self.y), yy: fr.dx(&self.yy) }
    }

    pub fn dy(&self) -> Jet {
        Jet { f: self.y.clone(), y: self.yy.clone(), yy: vec![f64::NAN; self.f.len()] }
    }

    fn scale(&self, c: f64) -> Jet {
        let s = |v: &[f64]| v.iter().map(|x| c * x).collect();
        Jet { f: s(&self.f), y: s(&self.y), yy: s(&self.yy) }
    }
}

fn add(a: &Jet, b: &Jet) -> Jet {
    Jet { f: zip(&a.f, &b.f, |x, y| x + y), y: zip(&a.y, &b.y, |x, y| x + y), yy: zip(&a.yy, &b.yy, |x, y| x + y) }
}

fn sub(a: &Jet, b: &Jet) -> Jet {
    Jet { f: zip(&a.f, &b.f, |x, y| x - y), y: zip(&a.y, &b.y, |x, y| x - y), yy: zip(&a.yy, &b.yy, |x, y| x - y) }
}

fn mul(a: &Jet, b: &Jet) -> Jet {
    let n = a.f.len();
    let mut out = Jet { f: vec![0.0; n], y: vec![0.0; n], yy: vec![0.0; n] };
    for k in 0..n {
        out.f[k] = a.f[k] * b.f[k];
        out.y[k] = a.y[k] * b.f[k] + a.f[k] * b.y[k];
        out.yy[k] = a.yy[k] * b.f[k] + 2.0 * a.y[k] * b.y[k] + a.f[k] * b.yy[k];
    }
    out
}

macro_rules! binop {
    ($tr:ident, $m:ident, $f:ident) => {
        impl $tr<&Jet> for &Jet {
            type Output = Jet;
            fn $m(self, o: &Jet) -> Jet {
                $f(self, o)
            }
        }
        impl $tr<Jet> for &Jet {
            type Output = Jet;
            fn $m(self, o: Jet) -> Jet {
                $f(self, &o)
            }
        }
        impl $tr<&Jet> for Jet {
            type Output = Jet;
            fn $m(self, o: &Jet) -> Jet {
                $f(&self, o)
            }
        }
        impl $tr<Jet> for Jet {
            type Output = Jet;
            fn $m(self, o: Jet) -> Jet {
                $f(&self, &o)
            }
        }
    };
}

binop!(Add, add, add);
binop!(Sub, sub, sub);
binop!(Mul, mul, mul);

impl Mul<&Jet> for f64 {
    type Output = Jet;
    fn mul(self, o: &Jet) -> Jet {
        o.scale(self)
    }
}

impl Mul<Jet> for f64 {
    type Output = Jet;
    fn mul(self, o: Jet) -> Jet {
        o.scale(self)
    }
}

impl Sub<&Jet> for f64 {
    type Output = Jet;
    fn sub(self, o: &Jet) -> Jet {
        let mut j = o.scale(-1.0);
        j.f.iter_mut().for_each(|v| *v += self);
        j
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

impl Neg for &Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn leibniz_matches_closed_form() {
        // a = y², b = e^y on one column: (ab)'' = (2 + 4y + y²)e^y.
        let ys = [0.0, 0.5, 1.3];
        let a = Jet::columns(&ys.map(|y| [y * y, 2.0 * y, 2.0]), 1);
        let b = Jet::columns(&ys.map(|y: f64| [y.exp(); 3]), 1);
        let c = &a * &b;
        for (k, y) in ys.iter().enumerate() {
            assert!((c.yy[k] - (2.0 + 4.0 * y + y * y) * y.exp()).abs() < 1e-14);
        }
        let d = (2.0 - &a).dy();
        assert_eq!(d.f, vec![0.0, -1.0, -2.6]);
        assert!(d.yy.iter().all(|v| v.is_nan()));
    }
}
