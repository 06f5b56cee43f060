//! Banded LU with partial pivoting (LAPACK gbtf2 layout).

use crate::error::{Error, Result};

/// Element (r, c) is stored at `ab[(kv + r - c) + ldab * c]` with
/// `kv = kl + ku`; the extra `kl` rows hold pivoting fill-in.
#[derive(Clone, Debug)]
pub struct BandMatrix {
    pub n: usize,
    pub kl: usize,
    pub ku: usize,
    ldab: usize,
    ab: Vec<f64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let ldab = 2 * kl + ku + 1;
        BandMatrix {
            n,
            kl,
            ku,
            ldab,
            ab: vec![0.0; ldab * n],
        }
    }

    #[inline]
    fn idx(&self, r: usize, c: usize) -> usize {
        self.kl + self.ku + r - c + self.ldab * c
    }

    /// Panics if (r, c) lies outside the declared band.
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        assert!(
            r <= c + self.kl && c <= r + self.ku,
            "({r},{c}) outside band kl={} ku={}",
            self.kl,
            self.ku
        );
        let i = self.idx(r, c);
        self.ab[i] = v;
    }

    pub fn add(&mut self, r: usize, c: usize, v: f64) {
        assert!(r <= c + self.kl && c <= r + self.ku, "({r},{c}) outside band");
        let i = self.idx(r, c);
        self.ab[i] += v;
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        if r > c + self.kl || c > r + self.ku {
            0.0
        } else {
            self.ab[self.idx(r, c)]
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for (r, yr) in y.iter_mut().enumerate() {
            let c0 = r.saturating_sub(self.kl);
            let c1 = (r + self.ku).min(self.n - 1);
            for c in c0..=c1 {
                *yr += self.get(r, c) * x[c];
            }
        }
        y
    }

    pub fn factor(mut self) -> Result<BandLu> {
        let n = self.n;
        let (kl, ku) = (self.kl, self.ku);
        let kv = kl + ku;
        let ld = self.ldab;
        let mut ipiv = vec![0usize; n];
        let mut ju = 0usize;
        let at = |r: usize, c: usize| kv + r - c + ld * c;
        for j in 0..n {
            let km = kl.min(n - 1 - j);
            let mut jp = 0;
            let mut best = self.ab[at(j, j)].abs();
            for i in 1..=km {
                let v = self.ab[at(j + i, j)].abs();
                if v > best {
                    best = v;
                    jp = i;
                }
            }
            ipiv[j] = j + jp;
            if best == 0.0 {
                return Err(Error::Singular(j));
            }
            ju = ju.max((j + ku + jp).min(n - 1));
            if jp != 0 {
                for c in j..=ju {
                    self.ab.swap(at(j + jp, c), at(j, c));
                }
            }
            let piv = self.ab[at(j, j)];
            for i in 1..=km {
                self.ab[at(j + i, j)] /= piv;
            }
            for c in j + 1..=ju {
                let ujc = self.ab[at(j, c)];
                if ujc != 0.0 {
                    for i in 1..=km {
                        let l = self.ab[at(j + i, j)];
                        self.ab[at(j + i, c)] -= l * ujc;
                    }
                }
            }
        }
        Ok(BandLu { m: self, ipiv })
    }
}

#[derive(Clone, Debug)]
pub struct BandLu {
    m: BandMatrix,
    ipiv: Vec<usize>,
}

impl BandLu {
    pub fn n(&self) -> usize {
        self.m.n
    }

    pub fn solve_in_place(&self, b: &mut [f64]) {
        let n = self.m.n;
        let kl = self.m.kl;
        let kv = kl + self.m.ku;
        let ld = self.m.ldab;
        let ab = &self.m.ab;
        let at = |r: usize, c: usize| kv + r - c + ld * c;
        for j in 0..n.saturating_sub(1) {
            let l = self.ipiv[j];
            if l != j {
                b.swap(l, j);
            }
            let bj = b[j];
            if bj != 0.0 {
                for i in 1..=kl.min(n - 1 - j) {
                    b[j + i] -= ab[at(j + i, j)] * bj;
                }
            }
        }
        for j in (0..n).rev() {
            b[j] /= ab[at(j, j)];
            let bj = b[j];
            if bj != 0.0 {
                for i in j.saturating_sub(kv)..j {
                    b[i] -= ab[at(i, j)] * bj;
                }
            }
        }
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }
}
