//! Periodic-x Fourier transforms on x-fastest arrays.

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

type Plans = (Arc<dyn Fft<f64>>, Arc<dyn Fft<f64>>);

fn plans(nx: usize) -> Plans {
    static CACHE: OnceLock<Mutex<HashMap<usize, Plans>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut g = cache.lock().expect("fft cache poisoned");
    g.entry(nx)
        .or_insert_with(|| {
            let mut p = FftPlanner::new();
            (p.plan_fft_forward(nx), p.plan_fft_inverse(nx))
        })
        .clone()
}

#[derive(Clone)]
pub struct Fourier {
    pub nx: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Fourier {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Fourier({})", self.nx)
    }
}

impl Fourier {
    pub fn new(nx: usize) -> Self {
        let (fwd, inv) = plans(nx);
        Fourier { nx, fwd, inv }
    }

    /// Signed wavenumber of FFT index `i`.
    #[inline]
    pub fn wavenumber(&self, i: usize) -> f64 {
        if i <= self.nx / 2 {
            i as f64
        } else {
            i as f64 - self.nx as f64
        }
    }

    /// Wavenumber used for differentiation (Nyquist mode dropped).
    #[inline]
    pub fn dk(&self, i: usize) -> f64 {
        if 2 * i == self.nx {
            0.0
        } else {
            self.wavenumber(i)
        }
    }

    /// Modes kept by the 2/3 rule.
    #[inline]
    pub fn kept(&self, i: usize) -> bool {
        3 * (self.wavenumber(i).abs() as usize) < self.nx
    }

    /// Normalised forward transform of every row (coefficient = amplitude).
    pub fn forward(&self, f: &[f64]) -> Vec<Complex64> {
        let s = 1.0 / self.nx as f64;
        let mut c: Vec<Complex64> = f.iter().map(|&v| Complex64::new(v * s, 0.0)).collect();
        self.fwd.process(&mut c);
        c
    }

    pub fn forward_complex(&self, f: &[Complex64]) -> Vec<Complex64> {
        let s = 1.0 / self.nx as f64;
        let mut c: Vec<Complex64> = f.iter().map(|&v| v * s).collect();
        self.fwd.process(&mut c);
        c
    }

    pub fn inverse(&self, c: &[Complex64]) -> Vec<f64> {
        let mut b = c.to_vec();
        self.inv.process(&mut b);
        b.iter().map(|z| z.re).collect()
    }

    /// x-derivative of order `n` of every row.
    pub fn dx_n(&self, f: &[f64], n: u32) -> Vec<f64> {
        let mut c = self.forward(f);
        let nx = self.nx;
        for row in c.chunks_mut(nx) {
            for (i, z) in row.iter_mut().enumerate() {
                let ik = Complex64::new(0.0, self.dk(i));
                *z *= ik.powu(n);
            }
        }
        self.inverse(&c)
    }

    pub fn dx(&self, f: &[f64]) -> Vec<f64> {
        self.dx_n(f, 1)
    }

    /// Zero every mode outside the 2/3 band.
    pub fn dealias(&self, c: &mut [Complex64]) {
        let nx = self.nx;
        for row in c.chunks_mut(nx) {
            for (i, z) in row.iter_mut().enumerate() {
                if !self.kept(i) {
                    *z = Complex64::new(0.0, 0.0);
                }
            }
        }
    }

    pub fn dealias_real(&self, f: &[f64]) -> Vec<f64> {
        let mut c = self.forward(f);
        self.dealias(&mut c);
        self.inverse(&c)
    }

    /// Antiderivative in x of a zero-mean periodic row set (mean dropped).
    pub fn inv_dx(&self, f: &[f64]) -> Vec<f64> {
        let mut c = self.forward(f);
        let nx = self.nx;
        for row in c.chunks_mut(nx) {
            for (i, z) in row.iter_mut().enumerate() {
                let k = self.dk(i);
                *z = if k == 0.0 {
                    Complex64::new(0.0, 0.0)
                } else {
                    *z / Complex64::new(0.0, k)
                };
            }
        }
        self.inverse(&c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn derivative_of_sine() {
        let nx = 64;
        let fr = Fourier::new(nx);
        let f: Vec<f64> = (0..nx).map(|i| (2.0 * PI * i as f64 / nx as f64).sin()).collect();
        let d = fr.dx(&f);
        for i in 0..nx {
            let x = 2.0 * PI * i as f64 / nx as f64;
            assert!((d[i] - x.cos()).abs() < 1e-12);
        }
    }

    #[test]
    fn antiderivative_inverts() {
        let nx = 16;
        let fr = Fourier::new(nx);
        let f: Vec<f64> = (0..nx)
            .map(|i| (3.0 * 2.0 * PI * i as f64 / nx as f64).cos())
            .collect();
        let g = fr.dx(&fr.inv_dx(&f));
        for i in 0..nx {
            assert!((g[i] - f[i]).abs() < 1e-13);
        }
    }
}
