//! Quadrature kernels: geometric grids for `dt/t` integrals, Simpson rules on
//! uniform sample grids, oscillatory Fourier integrals via composite
//! Gauss-Legendre panels, and exact piecewise-polynomial calculus for the
//! closed-form band-limited profiles.

use crate::{C64, Error, Result};
use serde::{Deserialize, Serialize};

/// Geometric grid on `[t_min, t_max]` discretizing `\int_0^\infty . dt/t`.
///
/// Nodes are uniform in `log t`, so the trapezoid rule with constant weight
/// `dlog` (halved at the ends) is the natural exact-weight rule for the
/// scale-invariant measure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogGrid {
    pub t_min: f64,
    pub t_max: f64,
    pub count: usize,
}

impl LogGrid {
    pub fn new(t_min: f64, t_max: f64, count: usize) -> Result<Self> {
        if !(t_min > 0.0 && t_max > t_min) || count < 2 {
            return Err(Error::InvalidModel(format!(
                "log grid requires 0 < t_min < t_max and count >= 2, got [{t_min}, {t_max}] x {count}"
            )));
        }
        Ok(LogGrid { t_min, t_max, count })
    }

    /// Constant log-spacing `log(t_max/t_min)/(count-1)`.
    pub fn log_step(&self) -> f64 {
        (self.t_max / self.t_min).ln() / (self.count - 1) as f64
    }

    pub fn nodes(&self) -> Vec<f64> {
        let dl = self.log_step();
        let l0 = self.t_min.ln();
        (0..self.count).map(|i| (l0 + i as f64 * dl).exp()).collect()
    }

    /// Trapezoid weights for `dt/t`: `dlog` inside, `dlog/2` at the ends.
    pub fn weights(&self) -> Vec<f64> {
        let dl = self.log_step();
        (0..self.count)
            .map(|i| if i == 0 || i == self.count - 1 { 0.5 * dl } else { dl })
            .collect()
    }

    /// Grid with the log-step halved (node count, not span, is refined).
    pub fn refined(&self) -> LogGrid {
        LogGrid { t_min: self.t_min, t_max: self.t_max, count: 2 * self.count - 1 }
    }
}

/// Composite Simpson weights for `n` uniformly spaced samples (`n` odd).
pub fn simpson_weights(n: usize, h: f64) -> Vec<f64> {
    assert!(n >= 3 && n % 2 == 1, "simpson needs an odd sample count >= 3");
    let mut w = vec![0.0; n];
    let c = h / 3.0;
    for (i, wi) in w.iter_mut().enumerate() {
        *wi = c * if i == 0 || i == n - 1 {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        };
    }
    w
}

/// Composite Simpson integral of complex samples on a uniform grid.
pub fn simpson(values: &[C64], h: f64) -> C64 {
    simpson_weights(values.len(), h)
        .iter()
        .zip(values)
        .map(|(w, v)| v * *w)
        .sum()
}

/// Cumulative integral `F(x_k) = \int_{x_0}^{x_k} f` of uniform samples,
/// fourth-order accurate (local parabola through each sample triple).
pub fn cumulative_simpson(values: &[C64], h: f64) -> Vec<C64> {
    let n = values.len();
    let mut out = vec![C64::new(0.0, 0.0); n];
    if n < 2 {
        return out;
    }
    // Integral over [x_i, x_{i+1}] from the parabola through (i-1, i, i+1)
    // or (i, i+1, i+2) at the ends, averaged in the interior.
    let seg = |a: C64, b: C64, c: C64, first_half: bool| -> C64 {
        // parabola through three consecutive samples; integral over first or
        // second half of the double interval
        if first_half {
            (a * 5.0 + b * 8.0 - c) * (h / 12.0)
        } else {
            (-a + b * 8.0 + c * 5.0) * (h / 12.0)
        }
    };
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..n - 1 {
        let inc = if i == 0 {
            if n == 2 {
                (values[0] + values[1]) * (0.5 * h)
            } else {
                seg(values[0], values[1], values[2], true)
            }
        } else if i == n - 2 {
            seg(values[n - 3], values[n - 2], values[n - 1], false)
        } else {
            // average of the two parabola estimates covering this interval
            (seg(values[i - 1], values[i], values[i + 1], false)
                + seg(values[i], values[i + 1], values[i + 2], true))
                * 0.5
        };
        acc += inc;
        out[i + 1] = acc;
    }
    out
}

/// 10-point Gauss-Legendre nodes/weights on [-1, 1].
const GL10_X: [f64; 10] = [
    -0.9739065285171717,
    -0.8650633666889845,
    -0.6794095682990244,
    -0.4333953941292472,
    -0.14887433898163122,
    0.14887433898163122,
    0.4333953941292472,
    0.6794095682990244,
    0.8650633666889845,
    0.9739065285171717,
];
const GL10_W: [f64; 10] = [
    0.06667134430868814,
    0.14945134915058059,
    0.21908636251598204,
    0.26926671930999635,
    0.29552422471475287,
    0.29552422471475287,
    0.26926671930999635,
    0.21908636251598204,
    0.14945134915058059,
    0.06667134430868814,
];

/// `\int_a^b f(x) dx` by composite 10-point Gauss-Legendre over `panels`.
pub fn gauss_legendre<F: FnMut(f64) -> C64>(a: f64, b: f64, panels: usize, mut f: F) -> C64 {
    let panels = panels.max(1);
    let w = (b - a) / panels as f64;
    let mut acc = C64::new(0.0, 0.0);
    for p in 0..panels {
        let lo = a + p as f64 * w;
        let mid = lo + 0.5 * w;
        let half = 0.5 * w;
        for (x, gw) in GL10_X.iter().zip(GL10_W.iter()) {
            acc += f(mid + half * x) * (gw * half);
        }
    }
    acc
}

/// Adaptive `\int_0^\infty f(t) dt/t` on a geometric grid `[a, b]`, refined by
/// doubling the node count until the relative change drops below `rel_tol`.
pub fn adaptive_log_integral<F: Fn(f64) -> f64>(
    a: f64,
    b: f64,
    rel_tol: f64,
    f: F,
) -> Result<f64> {
    if !(a > 0.0 && b > a) {
        return Err(Error::InvalidModel(format!("bad integration range [{a}, {b}]")));
    }
    let mut count = 513usize;
    let mut prev = f64::NAN;
    for _ in 0..12 {
        let grid = LogGrid { t_min: a, t_max: b, count };
        let v: f64 = grid
            .nodes()
            .iter()
            .zip(grid.weights())
            .map(|(t, w)| f(*t) * w)
            .sum();
        if !v.is_finite() {
            return Err(Error::Profile("non-finite integrand in log integral".into()));
        }
        if prev.is_finite() && (v - prev).abs() <= rel_tol * v.abs().max(1e-300) {
            return Ok(v);
        }
        prev = v;
        count = 2 * count - 1;
    }
    Ok(prev)
}

/// Real polynomial with coefficients in ascending powers.
#[derive(Debug, Clone, PartialEq)]
pub struct Poly(pub Vec<f64>);

impl Poly {
    pub fn eval(&self, x: f64) -> f64 {
        self.0.iter().rev().fold(0.0, |acc, c| acc * x + c)
    }

    pub fn derivative(&self) -> Poly {
        if self.0.len() <= 1 {
            return Poly(vec![0.0]);
        }
        Poly(self.0[1..].iter().enumerate().map(|(i, c)| (i + 1) as f64 * c).collect())
    }

    /// Antiderivative with value `c0` at `x0`.
    pub fn antiderivative(&self, x0: f64, c0: f64) -> Poly {
        let mut coeffs = vec![0.0];
        coeffs.extend(self.0.iter().enumerate().map(|(i, c)| c / (i + 1) as f64));
        let mut p = Poly(coeffs);
        let shift = c0 - p.eval(x0);
        p.0[0] += shift;
        p
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        let mut out = vec![0.0; self.0.len() + other.0.len() - 1];
        for (i, a) in self.0.iter().enumerate() {
            for (j, b) in other.0.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Poly(out)
    }

    pub fn scale(&self, s: f64) -> Poly {
        Poly(self.0.iter().map(|c| c * s).collect())
    }

    /// Composition with the affine map `x -> a*x + b`.
    pub fn compose_affine(&self, a: f64, b: f64) -> Poly {
        let mut result = Poly(vec![0.0]);
        for &c in self.0.iter().rev() {
            result = result.mul(&Poly(vec![b, a]));
            result.0[0] += c;
        }
        result
    }
}

/// Real piecewise polynomial on `[-delta, delta]`, the exact carrier of the
/// closed-form band-limited profiles' Fourier data.
#[derive(Debug, Clone)]
pub struct PiecewisePoly {
    pub delta: f64,
    /// Non-overlapping pieces `(lo, hi, poly)` covering `[-delta, delta]`.
    pub pieces: Vec<(f64, f64, Poly)>,
}

impl PiecewisePoly {
    pub fn eval(&self, x: f64) -> f64 {
        if x < -self.delta || x > self.delta {
            return 0.0;
        }
        for (lo, hi, p) in &self.pieces {
            if x >= *lo && (x <= *hi || *hi == self.delta) {
                return p.eval(x);
            }
        }
        0.0
    }

    pub fn derivative(&self) -> PiecewisePoly {
        PiecewisePoly {
            delta: self.delta,
            pieces: self.pieces.iter().map(|(a, b, p)| (*a, *b, p.derivative())).collect(),
        }
    }

    /// Antiderivative vanishing at `-delta`, accumulated across pieces.
    pub fn antiderivative(&self) -> PiecewisePoly {
        let mut pieces = Vec::with_capacity(self.pieces.len());
        let mut acc = 0.0;
        for (lo, hi, p) in &self.pieces {
            let ad = p.antiderivative(*lo, acc);
            acc = ad.eval(*hi);
            pieces.push((*lo, *hi, ad));
        }
        PiecewisePoly { delta: self.delta, pieces }
    }

    /// Total integral over the support.
    pub fn integral(&self) -> f64 {
        let mut acc = 0.0;
        for (lo, hi, p) in &self.pieces {
            let ad = p.antiderivative(*lo, 0.0);
            acc += ad.eval(*hi);
        }
        acc
    }

    /// Supremum of `|p|` sampled densely on every piece.
    pub fn sup_abs(&self) -> f64 {
        let mut best: f64 = 0.0;
        for (lo, hi, p) in &self.pieces {
            for k in 0..=2048 {
                let x = lo + (hi - lo) * k as f64 / 2048.0;
                best = best.max(p.eval(x).abs());
            }
        }
        best
    }

    /// `\int |p|` by dense sampling (used for `||fhat||_1` style norms).
    pub fn l1(&self) -> f64 {
        let mut acc = 0.0;
        for (lo, hi, p) in &self.pieces {
            let m = 4096;
            let h = (hi - lo) / m as f64;
            let mut s = 0.5 * (p.eval(*lo).abs() + p.eval(*hi).abs());
            for k in 1..m {
                s += p.eval(lo + k as f64 * h).abs();
            }
            acc += s * h;
        }
        acc
    }
}
