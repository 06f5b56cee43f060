//! Time series of snapshots and cubic Lagrange interpolation in time.

/// Four-point Lagrange weights at `t` using the nodes nearest to it.
/// Returns (first index, weights, derivative weights).
pub fn cubic_weights(times: &[f64], t: f64) -> (usize, Vec<f64>, Vec<f64>) {
    let n = times.len();
    let m = n.min(4);
    let pos = times.partition_point(|&s| s <= t);
    let start = pos.saturating_sub(m / 2).min(n - m);
    let nodes = &times[start..start + m];
    let mut w = vec![0.0; m];
    let mut dw = vec![0.0; m];
    for j in 0..m {
        let mut l = 1.0;
        let mut denom = 1.0;
        for k in 0..m {
            if k != j {
                l *= t - nodes[k];
                denom *= nodes[j] - nodes[k];
            }
        }
        w[j] = l / denom;
        let mut d = 0.0;
        for q in 0..m {
            if q == j {
                continue;
            }
            let mut p = 1.0;
            for k in 0..m {
                if k != j && k != q {
                    p *= t - nodes[k];
                }
            }
            d += p;
        }
        dw[j] = d / denom;
    }
    (start, w, dw)
}

/// Interpolate a series of equally-shaped arrays at time `t`.
pub fn interp(times: &[f64], data: &[Vec<f64>], t: f64) -> Vec<f64> {
    let (s, w, _) = cubic_weights(times, t);
    combine(&data[s..s + w.len()], &w)
}

/// Time derivative of the cubic interpolant at `t`.
pub fn interp_dt(times: &[f64], data: &[Vec<f64>], t: f64) -> Vec<f64> {
    let (s, _, dw) = cubic_weights(times, t);
    combine(&data[s..s + dw.len()], &dw)
}

fn combine(data: &[Vec<f64>], w: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; data[0].len()];
    for (d, &c) in data.iter().zip(w) {
        if c == 0.0 {
            continue;
        }
        for (o, v) in out.iter_mut().zip(d) {
            *o += c * v;
        }
    }
    out
}

/// Second-order centred time differences of a series (one-sided at ends).
pub fn time_derivative(times: &[f64], data: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = times.len();
    assert!(n >= 3, "need at least three snapshots");
    (0..n)
        .map(|k| {
            let (a, b, c, ta, tb, tc, tk) = if k == 0 {
                (0, 1, 2, times[0], times[1], times[2], times[0])
            } else if k == n - 1 {
                (n - 3, n - 2, n - 1, times[n - 3], times[n - 2], times[n - 1], times[n - 1])
            } else {
                (k - 1, k, k + 1, times[k - 1], times[k], times[k + 1], times[k])
            };
            // derivative of the quadratic through three nodes
            let wa = (2.0 * tk - tb - tc) / ((ta - tb) * (ta - tc));
            let wb = (2.0 * tk - ta - tc) / ((tb - ta) * (tb - tc));
            let wc = (2.0 * tk - ta - tb) / ((tc - ta) * (tc - tb));
            data[a]
                .iter()
                .zip(&data[b])
                .zip(&data[c])
                .map(|((x, y), z)| wa * x + wb * y + wc * z)
                .collect()
        })
        .collect()
}
