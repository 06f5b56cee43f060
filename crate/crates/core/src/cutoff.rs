//! Smooth cutoff χ: 1 on [0,1], 0 on [2,∞).

fn psi(s: f64) -> [f64; 3] {
    if s <= 0.0 {
        return [0.0; 3];
    }
    let p = (-1.0 / s).exp();
    let s2 = s * s;
    [p, p / s2, p * (1.0 / (s2 * s2) - 2.0 / (s2 * s))]
}

/// χ(y) = ψ(2−y)/(ψ(2−y)+ψ(y−1)) with ψ(s) = e^{−1/s} for s > 0.
#[derive(Clone, Copy, Debug, Default)]
pub struct CutoffChi;

impl CutoffChi {
    /// (χ, χ′, χ″) at y.
    pub fn eval(&self, y: f64) -> [f64; 3] {
        if y <= 1.0 {
            return [1.0, 0.0, 0.0];
        }
        if y >= 2.0 {
            return [0.0; 3];
        }
        let [a, a1, a2] = psi(2.0 - y);
        let [b, b1, b2] = psi(y - 1.0);
        let (a1, a2) = (-a1, a2);
        let s = a + b;
        let s1 = a1 + b1;
        let s2 = a2 + b2;
        let num1 = a1 * s - a * s1;
        let c = a / s;
        let c1 = num1 / (s * s);
        let c2 = (a2 * s - a * s2) / (s * s) - 2.0 * s1 * num1 / (s * s * s);
        [c, c1, c2]
    }

    pub fn value(&self, y: f64) -> f64 {
        self.eval(y)[0]
    }

    /// Tabulate (χ, χ′, χ″) on nodes.
    pub fn tabulate(&self, y: &[f64]) -> [Vec<f64>; 3] {
        let v: Vec<[f64; 3]> = y.iter().map(|&s| self.eval(s)).collect();
        [0, 1, 2].map(|k| v.iter().map(|e| e[k]).collect())
    }

    /// ∫₀^η s·χ(s) ds, by exact value on [0,1] and Gauss–Legendre on [1, min(η,2)].
    pub fn first_moment(&self, eta: f64) -> f64 {
        if eta <= 1.0 {
            return 0.5 * eta * eta;
        }
        0.5 + gauss(|s| s * self.value(s), 1.0, eta.min(2.0))
    }

    /// ∫₀^η χ(s) ds.
    pub fn integral(&self, eta: f64) -> f64 {
        if eta <= 1.0 {
            return eta;
        }
        1.0 + gauss(|s| self.value(s), 1.0, eta.min(2.0))
    }
}

fn gauss(f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    const X: [f64; 4] = [0.183_434_642_495_649_8, 0.525_532_409_916_329, 0.796_666_477_413_626_7, 0.960_289_856_497_536_3];
    const W: [f64; 4] = [0.362_683_783_378_362, 0.313_706_645_877_887_3, 0.222_381_034_453_374_5, 0.101_228_536_290_376_3];
    let panels = 64;
    let h = (b - a) / panels as f64;
    let mut s = 0.0;
    for p in 0..panels {
        let m = a + (p as f64 + 0.5) * h;
        for (x, w) in X.iter().zip(&W) {
            s += w * (f(m + 0.5 * h * x) + f(m - 0.5 * h * x));
        }
    }
    0.5 * h * s
}
