//! The two analysing/synthesising function classes and the moment-shifting
//! transforms between them.
//!
//! Band-limited profiles are Schwartz-type functions `eta` with Fourier
//! transform supported in `[-delta, delta]` and `N` vanishing derivatives at
//! the origin (the class `Psi~_N^delta`). Multiplying by `x^n` differentiates
//! the Fourier data and raises the moment order by `n`; dividing by `x^m`
//! (allowed when `m <= N`) takes iterated antiderivatives and keeps the
//! Fourier support inside `[-delta, delta]` because the moments vanish.
//!
//! Two representations coexist:
//! - closed form: Fourier data `i^power * (piecewise polynomial)`, on which
//!   the whole transform algebra is exact;
//! - samples: a uniform grid over `[-delta, delta]` with grid calculus
//!   (finite differences / cumulative quadrature), the generic path.
//!
//! Holomorphic profiles `psi` live on a bisector and are certified by their
//! decay `|psi(x)| <= C min(|x|^sigma, |x|^-tau)` on sampled grids; full
//! complex-analytic verification is out of scope.
//!
//! Fourier convention throughout: `eta(x) = (1/2pi) \int fhat(xi) e^{i xi x} dxi`.

use crate::quad::{cumulative_simpson, gauss_legendre, simpson_weights, PiecewisePoly, Poly};
use crate::{C64, Error, Result};
use std::sync::Arc;

/// Default sample count for the Fourier grid of a band-limited profile.
pub const FHAT_GRID: usize = 4097;

const I: C64 = C64 { re: 0.0, im: 1.0 };

fn i_pow(k: u32) -> C64 {
    match k % 4 {
        0 => C64::new(1.0, 0.0),
        1 => I,
        2 => C64::new(-1.0, 0.0),
        _ => -I,
    }
}

#[derive(Clone)]
enum BandForm {
    /// `fhat(xi) = i^power * poly(xi)`, exact.
    Closed { power: u32, poly: PiecewisePoly },
    /// Uniform samples of `fhat` on `[-delta, delta]` (odd count).
    Samples { values: Vec<C64> },
}

/// A function in `Psi~_N^delta(R)` (or `Theta~^delta(R)` when `n_order = 0`).
#[derive(Clone)]
pub struct BandlimitedProfile {
    pub delta: f64,
    /// Certified moment order: derivatives `0..n_order` vanish at 0.
    pub n_order: u32,
    /// Registry name, when constructed from the registry.
    pub name: Option<String>,
    form: BandForm,
}

impl BandlimitedProfile {
    /// Evaluate `eta` at a complex point by inverse-Fourier quadrature with
    /// oscillation-adapted Gauss-Legendre panels.
    pub fn eval_c(&self, z: C64) -> C64 {
        let osc = z.norm();
        match &self.form {
            BandForm::Closed { power, poly } => {
                let mut acc = C64::new(0.0, 0.0);
                for (lo, hi, p) in &poly.pieces {
                    let panels = (((hi - lo) * (osc + 1.0) / 4.0).ceil() as usize).max(4) + 4;
                    acc += gauss_legendre(*lo, *hi, panels, |xi| {
                        C64::new(p.eval(xi), 0.0) * (I * z * xi).exp()
                    });
                }
                acc * i_pow(*power) / C64::new(std::f64::consts::TAU, 0.0)
            }
            BandForm::Samples { values } => {
                let m = values.len();
                let h = 2.0 * self.delta / (m - 1) as f64;
                let w = simpson_weights(m, h);
                let mut acc = C64::new(0.0, 0.0);
                for (k, v) in values.iter().enumerate() {
                    let xi = -self.delta + k as f64 * h;
                    acc += v * w[k] * (I * z * xi).exp();
                }
                acc / C64::new(std::f64::consts::TAU, 0.0)
            }
        }
    }

    pub fn eval(&self, x: f64) -> C64 {
        self.eval_c(C64::new(x, 0.0))
    }

    /// Fourier data at a point of `[-delta, delta]` (zero outside).
    pub fn fhat_at(&self, xi: f64) -> C64 {
        if xi.abs() > self.delta {
            return C64::new(0.0, 0.0);
        }
        match &self.form {
            BandForm::Closed { power, poly } => i_pow(*power) * poly.eval(xi),
            BandForm::Samples { values } => {
                let m = values.len();
                let h = 2.0 * self.delta / (m - 1) as f64;
                let pos = (xi + self.delta) / h;
                let k = (pos.floor().max(0.0) as usize).min(m - 2);
                let frac = pos - k as f64;
                values[k] * (1.0 - frac) + values[k + 1] * frac
            }
        }
    }

    pub fn fhat_sup(&self) -> f64 {
        match &self.form {
            BandForm::Closed { poly, .. } => poly.sup_abs(),
            BandForm::Samples { values } => values.iter().fold(0.0f64, |m, v| m.max(v.norm())),
        }
    }

    pub fn fhat_l1(&self) -> f64 {
        match &self.form {
            BandForm::Closed { poly, .. } => poly.l1(),
            BandForm::Samples { values } => {
                let m = values.len();
                let h = 2.0 * self.delta / (m - 1) as f64;
                values.iter().map(|v| v.norm() * h).sum()
            }
        }
    }

    /// Fourier moments `(1/2pi) \int (i xi)^j fhat(xi) dxi = d^j eta(0)`,
    /// by Simpson quadrature on a sampled grid (independent of the
    /// closed-form algebra).
    pub fn moment(&self, j: u32) -> C64 {
        let m = FHAT_GRID;
        let h = 2.0 * self.delta / (m - 1) as f64;
        let w = simpson_weights(m, h);
        let mut acc = C64::new(0.0, 0.0);
        for k in 0..m {
            let xi = -self.delta + k as f64 * h;
            acc += (I * xi).powu(j) * self.fhat_at(xi) * w[k];
        }
        acc / C64::new(std::f64::consts::TAU, 0.0)
    }

    /// Largest normalized moment residual below the certified order.
    pub fn moment_residual(&self) -> f64 {
        let scale = self.fhat_l1().max(1e-300);
        (0..self.n_order).map(|j| self.moment(j).norm() / scale).fold(0.0, f64::max)
    }

    /// Support leakage: residual Fourier mass the representation would push
    /// outside `[-delta, delta]` (zero for closed forms; endpoint residual
    /// after grid antiderivatives for samples).
    pub fn support_tail(&self) -> f64 {
        match &self.form {
            BandForm::Closed { .. } => 0.0,
            BandForm::Samples { values } => {
                let sup = values.iter().fold(0.0f64, |m, v| m.max(v.norm())).max(1e-300);
                values[0].norm().max(values[values.len() - 1].norm()) / sup
            }
        }
    }

    /// Quantitative nondegeneracy: sampled max of `|eta|` on each half-line
    /// relative to `||fhat||_1`.
    pub fn nondegenerate(&self) -> bool {
        let scale = self.fhat_l1().max(1e-300);
        let probe = |sign: f64| {
            let mut m: f64 = 0.0;
            for k in 1..=64 {
                let x = sign * 3.0 * k as f64 / (64.0 * self.delta);
                m = m.max(self.eval(x).norm());
            }
            m
        };
        probe(1.0) > 1e-6 * scale && probe(-1.0) > 1e-6 * scale
    }

    /// Max deviation of `fhat` from its reflection; zero for even profiles.
    pub fn evenness_residual(&self) -> f64 {
        let m = 513;
        let sup = self.fhat_sup().max(1e-300);
        let mut worst: f64 = 0.0;
        for k in 0..m {
            let xi = -self.delta + 2.0 * self.delta * k as f64 / (m - 1) as f64;
            worst = worst.max((self.fhat_at(xi) - self.fhat_at(-xi)).norm() / sup);
        }
        worst
    }

    /// Convert to the sampled representation on the default grid.
    pub fn to_samples(&self) -> BandlimitedProfile {
        let m = FHAT_GRID;
        let h = 2.0 * self.delta / (m - 1) as f64;
        let values = (0..m).map(|k| self.fhat_at(-self.delta + k as f64 * h)).collect();
        BandlimitedProfile {
            delta: self.delta,
            n_order: self.n_order,
            name: None,
            form: BandForm::Samples { values },
        }
    }

    /// Construct from raw Fourier samples (odd count, uniform over
    /// `[-delta, delta]`); the claimed moment order is re-certified.
    pub fn from_samples(delta: f64, values: Vec<C64>, n_claimed: u32) -> Result<Self> {
        if values.len() < 3 || values.len() % 2 == 0 {
            return Err(Error::Profile("need an odd sample count >= 3".into()));
        }
        if values.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::Profile("non-finite Fourier samples".into()));
        }
        let p = BandlimitedProfile {
            delta,
            n_order: n_claimed,
            name: None,
            form: BandForm::Samples { values },
        };
        if p.moment_residual() > 1e-8 {
            return Err(Error::Profile(format!(
                "claimed moment order {} not satisfied: residual {:e}",
                n_claimed,
                p.moment_residual()
            )));
        }
        Ok(p)
    }
}

/// `x -> x^n eta(x)`: differentiates the Fourier data `n` times and raises
/// the certified moment order by `n`.
pub fn multiply_power(eta: &BandlimitedProfile, n: u32) -> Result<BandlimitedProfile> {
    if n == 0 {
        return Ok(eta.clone());
    }
    let form = match &eta.form {
        BandForm::Closed { power, poly } => {
            let mut p = poly.clone();
            for _ in 0..n {
                p = p.derivative();
            }
            BandForm::Closed { power: power + n, poly: p }
        }
        BandForm::Samples { values } => {
            let m = values.len();
            let h = 2.0 * eta.delta / (m - 1) as f64;
            let get = |v: &[C64], i: isize| -> C64 {
                if i < 0 || i as usize >= m {
                    C64::new(0.0, 0.0)
                } else {
                    v[i as usize]
                }
            };
            let deriv4 = |v: &[C64]| -> Vec<C64> {
                (0..m as isize)
                    .map(|i| {
                        (-get(v, i + 2) + get(v, i + 1) * 8.0 - get(v, i - 1) * 8.0
                            + get(v, i - 2))
                            / C64::new(12.0 * h, 0.0)
                    })
                    .collect()
            };
            let deriv2 = |v: &[C64]| -> Vec<C64> {
                (0..m as isize)
                    .map(|i| (get(v, i + 1) - get(v, i - 1)) / C64::new(2.0 * h, 0.0))
                    .collect()
            };
            let mut d4 = values.clone();
            let mut d2 = values.clone();
            for _ in 0..n {
                d4 = deriv4(&d4);
                d2 = deriv2(&d2);
            }
            let sup4 = d4.iter().fold(0.0f64, |a, v| a.max(v.norm()));
            let disagreement =
                d4.iter().zip(&d2).fold(0.0f64, |a, (x, y)| a.max((x - y).norm()));
            if disagreement > 0.05 * sup4.max(1e-300) {
                return Err(Error::Resolution(format!(
                    "finite-difference derivative disagreement {disagreement:e} at scale {sup4:e}; \
                     use a finer Fourier grid"
                )));
            }
            // (x^n f)^ = (i d/dxi)^n fhat
            let rot = i_pow(n);
            BandForm::Samples { values: d4.into_iter().map(|v| v * rot).collect() }
        }
    };
    Ok(BandlimitedProfile { delta: eta.delta, n_order: eta.n_order + n, name: None, form })
}

/// `x -> x^{-m} eta(x)` with the removable singularity filled by
/// `d^m eta(0)/m!`; requires `m <= N`. Fourier side: `m` iterated
/// antiderivatives from `-delta`, which stay supported in `[-delta, delta]`
/// because the first `m` moments vanish.
pub fn divide_power(eta: &BandlimitedProfile, m: u32) -> Result<BandlimitedProfile> {
    if m == 0 {
        return Ok(eta.clone());
    }
    if m > eta.n_order {
        return Err(Error::Precondition(format!(
            "divide_power needs m <= certified moment order: m = {m}, N = {}",
            eta.n_order
        )));
    }
    let residual = eta.moment_residual();
    if residual > 1e-8 {
        return Err(Error::Precondition(format!(
            "input moments do not vanish to tolerance: residual {residual:e}"
        )));
    }
    let form = match &eta.form {
        BandForm::Closed { power, poly } => {
            let mut p = poly.clone();
            for _ in 0..m {
                p = p.antiderivative();
            }
            // lower the i-power by m: i^{-m} = i^{3m}
            BandForm::Closed { power: power + 3 * m, poly: p }
        }
        BandForm::Samples { values } => {
            let h = 2.0 * eta.delta / (values.len() - 1) as f64;
            let mut v = values.clone();
            for _ in 0..m {
                v = cumulative_simpson(&v, h);
            }
            let rot = i_pow(3 * m);
            BandForm::Samples { values: v.into_iter().map(|x| x * rot).collect() }
        }
    };
    Ok(BandlimitedProfile { delta: eta.delta, n_order: eta.n_order - m, name: None, form })
}

/// The shipped `Psi~_N^delta` representative: Fourier data
/// `i^N d^N/dxi^N (1 - (xi/delta)^2)^P` with `P = N + 9`, normalized to
/// `||fhat||_inf = 1`. Equivalently `eta(x) = x^N b(x)` for the positive-at-0
/// inverse transform `b` of the bump, so the moment order is exactly `N` and
/// the spectral tail decays like `|x|^{N - P - 1}`.
pub fn bump_deriv(n: u32, delta: f64) -> Result<BandlimitedProfile> {
    if !(delta > 0.0) {
        return Err(Error::Profile("band edge must be positive".into()));
    }
    let p = n + 9;
    let bump = bump_poly(p, delta);
    let mut poly = PiecewisePoly { delta, pieces: vec![(-delta, delta, bump)] };
    for _ in 0..n {
        poly = poly.derivative();
    }
    let sup = poly.sup_abs();
    let poly = PiecewisePoly {
        delta,
        pieces: poly.pieces.into_iter().map(|(a, b, q)| (a, b, q.scale(1.0 / sup))).collect(),
    };
    Ok(BandlimitedProfile {
        delta,
        n_order: n,
        name: Some(format!("bump-deriv-{n}")),
        form: BandForm::Closed { power: n, poly },
    })
}

/// `(1 - (xi/delta)^2)^P` as an exact polynomial.
fn bump_poly(p: u32, delta: f64) -> Poly {
    let base = Poly(vec![1.0, 0.0, -1.0 / (delta * delta)]);
    let mut out = Poly(vec![1.0]);
    for _ in 0..p {
        out = out.mul(&base);
    }
    out
}

/// Even nonnegative profile `eta(x) = alpha x^{2N} phihat(x)^2` from a bump
/// `phi` supported on `[-delta/2, delta/2]`, with `alpha` normalized so that
/// `alpha \int_0^infty t^{2N} phihat(t)^2 t^2 e^{-t^2} dt/t = 1`. This is the
/// synthesising function for the sqrt(L) atom path; its Fourier data
/// `alpha (-1)^N 2pi (phi*phi)^{(2N)}` is computed exactly.
pub fn cosine_atom_profile(n_half: u32, delta: f64) -> Result<BandlimitedProfile> {
    if !(delta > 0.0) {
        return Err(Error::Profile("band edge must be positive".into()));
    }
    if n_half == 0 {
        return Err(Error::Profile("need moment order >= 2".into()));
    }
    let two_n = 2 * n_half;
    let p = n_half + 3;
    let half = delta / 2.0;
    let g = bump_poly(p, half);
    let q_plus = poly_self_convolve(&g, half);
    let q_minus = q_plus.compose_affine(-1.0, 0.0); // even reflection
    let mut poly =
        PiecewisePoly { delta, pieces: vec![(-delta, 0.0, q_minus), (0.0, delta, q_plus)] };
    for _ in 0..two_n {
        poly = poly.derivative();
    }
    // alpha against the paper-normalization weight t^2 e^{-t^2}
    let phihat = |t: f64| {
        gauss_legendre(-half, half, ((half * t.abs() / 4.0).ceil() as usize).max(4), |w| {
            C64::new(g.eval(w), 0.0) * (I * C64::new(t, 0.0) * w).exp()
        })
        .re
    };
    let integral = crate::quad::adaptive_log_integral(1e-6, 40.0, 1e-11, |t| {
        let ph = phihat(t);
        t.powi(two_n as i32) * ph * ph * t * t * (-t * t).exp()
    })?;
    if !(integral > 0.0) {
        return Err(Error::DegenerateProfile("cosine atom normalization vanished".into()));
    }
    let alpha = 1.0 / integral;
    let sign = if n_half % 2 == 0 { 1.0 } else { -1.0 };
    let scale = alpha * sign * std::f64::consts::TAU;
    let poly = PiecewisePoly {
        delta,
        pieces: poly.pieces.into_iter().map(|(a, b, q)| (a, b, q.scale(scale))).collect(),
    };
    Ok(BandlimitedProfile {
        delta,
        n_order: two_n,
        name: Some(format!("cosine-atom-{n_half}")),
        // the (-1)^N of i^{2N} is folded into `scale`; stored power stays 2N
        // so the closed-form algebra remains consistent.
        form: BandForm::Closed { power: two_n, poly },
    })
}

/// Exact self-convolution `q(y) = \int g(w) g(y - w) dw` of a polynomial
/// supported on `[-half, half]`; returns the piece valid on `y in [0, 2 half]`.
fn poly_self_convolve(g: &Poly, half: f64) -> Poly {
    let deg = g.0.len() - 1;
    // g(y - w) as a polynomial in w with Poly-in-y coefficients
    let mut gyw: Vec<Poly> = vec![Poly(vec![0.0]); deg + 1];
    for (j, &aj) in g.0.iter().enumerate() {
        let mut binom = 1.0f64;
        for l in 0..=j {
            if l > 0 {
                binom = binom * (j - l + 1) as f64 / l as f64;
            }
            let sign = if l % 2 == 0 { 1.0 } else { -1.0 };
            let mut coeffs = vec![0.0; j - l + 1];
            coeffs[j - l] = aj * binom * sign;
            gyw[l] = add_poly(&gyw[l], &Poly(coeffs));
        }
    }
    // product g(w) g(y - w), coefficients of w^k as Poly in y
    let mut prod: Vec<Poly> = vec![Poly(vec![0.0]); 2 * deg + 1];
    for (i, &ai) in g.0.iter().enumerate() {
        for (l, py) in gyw.iter().enumerate() {
            prod[i + l] = add_poly(&prod[i + l], &py.scale(ai));
        }
    }
    // integrate in w from (y - half) to half
    let mut result = Poly(vec![0.0]);
    let lower = Poly(vec![-half, 1.0]);
    let mut lower_pow = lower.clone();
    for (k, py) in prod.iter().enumerate() {
        let c = 1.0 / (k + 1) as f64;
        let upper_val = half.powi(k as i32 + 1);
        result = add_poly(&result, &py.scale(c * upper_val));
        result = add_poly(&result, &py.mul(&lower_pow).scale(-c));
        lower_pow = lower_pow.mul(&lower);
    }
    result
}

fn add_poly(a: &Poly, b: &Poly) -> Poly {
    let n = a.0.len().max(b.0.len());
    let mut out = vec![0.0; n];
    for (i, c) in a.0.iter().enumerate() {
        out[i] += c;
    }
    for (i, c) in b.0.iter().enumerate() {
        out[i] += c;
    }
    Poly(out)
}

// --- holomorphic profiles ----------------------------------------------------

/// Decay certificate for a holomorphic-class profile.
#[derive(Debug, Clone, serde::Serialize)]
pub struct DecayCertificate {
    pub c: f64,
    pub sigma: f64,
    pub tau: f64,
    /// Point where `|psi| / min(|x|^sigma, |x|^-tau)` peaks.
    pub arg_max: f64,
}

#[derive(Clone)]
enum HoloKind {
    /// `-2 pi z e^{-2 pi z}` on the right half, `2 pi z e^{2 pi z}` on the left.
    Poisson,
    /// `z e^{-z^2}`; needs theta < pi/4.
    GaussDecay,
    /// `x / (1 + x^2)^2`.
    RationalOneThree,
    /// Calderon partner: `alpha_± (±z)^sigma e^{∓ rate z} eta*(z)`.
    Partner { eta: Arc<BandlimitedProfile>, alpha_plus: f64, alpha_minus: f64, rate: f64 },
    Custom(Arc<dyn Fn(C64) -> C64 + Send + Sync>),
}

/// A function in `Psi_sigma^tau(S_theta^o)`, evaluated on the real line and
/// on bisector rays for contour quadrature.
#[derive(Clone)]
pub struct HoloProfile {
    pub sigma: f64,
    pub tau: f64,
    /// Bisector half-angle the profile is certified on.
    pub theta: f64,
    pub scale: f64,
    kind: HoloKind,
}

impl HoloProfile {
    pub fn poisson() -> Self {
        HoloProfile {
            sigma: 1.0,
            tau: 8.0,
            theta: std::f64::consts::FRAC_PI_4,
            scale: 1.0,
            kind: HoloKind::Poisson,
        }
    }

    pub fn gauss_decay() -> Self {
        HoloProfile {
            sigma: 1.0,
            tau: 6.0,
            theta: 0.7 * std::f64::consts::FRAC_PI_4,
            scale: 1.0,
            kind: HoloKind::GaussDecay,
        }
    }

    pub fn rational_one_three() -> Self {
        HoloProfile {
            sigma: 1.0,
            tau: 3.0,
            theta: std::f64::consts::FRAC_PI_4,
            scale: 1.0,
            kind: HoloKind::RationalOneThree,
        }
    }

    pub fn custom(
        sigma: f64,
        tau: f64,
        theta: f64,
        f: Arc<dyn Fn(C64) -> C64 + Send + Sync>,
    ) -> Self {
        HoloProfile { sigma, tau, theta, scale: 1.0, kind: HoloKind::Custom(f) }
    }

    pub(crate) fn partner(
        eta: Arc<BandlimitedProfile>,
        sigma: f64,
        tau: f64,
        theta: f64,
        alpha_plus: f64,
        alpha_minus: f64,
    ) -> Self {
        let rate = 2.0 * eta.delta / theta.cos();
        HoloProfile {
            sigma,
            tau,
            theta,
            scale: 1.0,
            kind: HoloKind::Partner { eta, alpha_plus, alpha_minus, rate },
        }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        let mut p = self.clone();
        p.scale *= factor;
        p
    }

    pub fn eval_c(&self, z: C64) -> C64 {
        if z.norm() == 0.0 {
            return C64::new(0.0, 0.0);
        }
        let v = match &self.kind {
            HoloKind::Poisson => {
                let tau2 = std::f64::consts::TAU;
                if z.re >= 0.0 {
                    -z * tau2 * (-z * tau2).exp()
                } else {
                    z * tau2 * (z * tau2).exp()
                }
            }
            HoloKind::GaussDecay => z * (-z * z).exp(),
            HoloKind::RationalOneThree => {
                let d = C64::new(1.0, 0.0) + z * z;
                z / (d * d)
            }
            HoloKind::Partner { eta, alpha_plus, alpha_minus, rate } => {
                // eta has real Taylor data, so eta*(z) = eta(z)
                let e = eta.eval_c(z);
                if z.re > 0.0 {
                    e * z.powf(self.sigma) * (-z * *rate).exp() * *alpha_plus
                } else if z.re < 0.0 {
                    e * (-z).powf(self.sigma) * (z * *rate).exp() * *alpha_minus
                } else {
                    C64::new(0.0, 0.0)
                }
            }
            HoloKind::Custom(f) => f(z),
        };
        v * self.scale
    }

    pub fn eval(&self, x: f64) -> C64 {
        self.eval_c(C64::new(x, 0.0))
    }

    pub fn kind_name(&self) -> &'static str {
        match &self.kind {
            HoloKind::Poisson => "poisson",
            HoloKind::GaussDecay => "gauss-decay",
            HoloKind::RationalOneThree => "rational-1-3",
            HoloKind::Partner { .. } => "calderon-partner",
            HoloKind::Custom(_) => "custom",
        }
    }

    /// Partner normalizing constants, when this profile is a partner.
    pub fn partner_alphas(&self) -> Option<(f64, f64)> {
        match &self.kind {
            HoloKind::Partner { alpha_plus, alpha_minus, .. } => {
                Some((*alpha_plus, *alpha_minus))
            }
            _ => None,
        }
    }
}

/// Fit the smallest `C` with `|psi(x)| <= C min(|x|^sigma, |x|^-tau)` on a
/// two-sided log grid spanning at least six decades around 1.
pub fn verify_decay(profile: &HoloProfile, grid: &[f64]) -> Result<DecayCertificate> {
    if grid.is_empty() {
        return Err(Error::Profile("empty verification grid".into()));
    }
    let lo = grid.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = grid.iter().cloned().fold(0.0f64, f64::max);
    if !(lo > 0.0) || hi / lo < 0.9e6 {
        return Err(Error::Profile(format!(
            "verification grid must span >= 6 decades around 1, got [{lo:e}, {hi:e}]"
        )));
    }
    let mut c: f64 = 0.0;
    let mut arg_max = 0.0;
    for &x in grid {
        for s in [-1.0, 1.0] {
            let v = profile.eval(s * x).norm();
            if !v.is_finite() {
                return Err(Error::Profile(format!("profile not finite at {}", s * x)));
            }
            let env = x.powf(profile.sigma).min(x.powf(-profile.tau));
            let ratio = v / env;
            if ratio > c {
                c = ratio;
                arg_max = s * x;
            }
        }
    }
    Ok(DecayCertificate { c, sigma: profile.sigma, tau: profile.tau, arg_max })
}

/// Default two-sided verification grid: 7 decades around 1.
pub fn default_decay_grid() -> Vec<f64> {
    (0..=700).map(|k| 10f64.powf(-3.5 + k as f64 * 0.01)).collect()
}

/// Quantitative nondegeneracy on each half-line.
pub fn holo_nondegenerate(profile: &HoloProfile) -> bool {
    let probe = |sign: f64| {
        (0..200)
            .map(|k| profile.eval(sign * 10f64.powf(-2.0 + k as f64 * 0.02)).norm())
            .fold(0.0f64, f64::max)
    };
    probe(1.0) > 1e-12 && probe(-1.0) > 1e-12
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Independent inverse-Fourier oracle: dense Simpson, bypassing the
    /// panel quadrature entirely.
    fn eval_oracle(p: &BandlimitedProfile, x: f64) -> C64 {
        let m = 32769;
        let h = 2.0 * p.delta / (m - 1) as f64;
        let w = simpson_weights(m, h);
        let mut acc = C64::new(0.0, 0.0);
        for k in 0..m {
            let xi = -p.delta + k as f64 * h;
            acc += p.fhat_at(xi) * w[k] * (I * C64::new(x, 0.0) * xi).exp();
        }
        acc / C64::new(std::f64::consts::TAU, 0.0)
    }

    /// Central finite differences with one Richardson step for
    /// `d^m eta(0) / m!`.
    fn derivative_at_zero_oracle(p: &BandlimitedProfile, m: u32) -> f64 {
        let fd = |h: f64| -> f64 {
            let order = m as usize;
            let size = order + 7;
            let mut vals: Vec<f64> = (0..=2 * size)
                .map(|k| p.eval((k as f64 - size as f64) * h).re)
                .collect();
            for _ in 0..order {
                vals = vals.windows(3).map(|w| (w[2] - w[0]) / (2.0 * h)).collect();
            }
            vals[vals.len() / 2]
        };
        let h = 1e-2;
        let d1 = fd(h);
        let d2 = fd(h / 2.0);
        (4.0 * d2 - d1) / 3.0 / factorial(m)
    }

    fn factorial(m: u32) -> f64 {
        (1..=m).map(|k| k as f64).product::<f64>().max(1.0)
    }

    #[test]
    fn bump_deriv_eval_matches_dense_oracle() {
        for n in [1u32, 2] {
            let eta = bump_deriv(n, 1.0).unwrap();
            for &x in &[0.1, 0.5, 2.0, -1.5, 7.0] {
                let direct = eta.eval(x).re;
                let oracle = eval_oracle(&eta, x).re;
                assert!((direct - oracle).abs() < 1e-10, "n={n} x={x}: {direct} vs {oracle}");
                assert!(eta.eval(x).im.abs() < 1e-12);
            }
        }
    }

    #[test]
    fn bump_deriv_moments_vanish_to_exact_order() {
        for n in [1u32, 2, 3] {
            let eta = bump_deriv(n, 1.0).unwrap();
            assert!(eta.moment_residual() < 1e-10, "n={n}: {}", eta.moment_residual());
            let m_n = eta.moment(n).norm();
            assert!(m_n > 1e-6 * eta.fhat_l1(), "n={n}: vanishes to higher order");
        }
    }

    #[test]
    fn bump_deriv_nondegenerate_and_parity() {
        let eta = bump_deriv(2, 1.0).unwrap();
        assert!(eta.nondegenerate());
        assert!(eta.evenness_residual() < 1e-12);
        let odd = bump_deriv(1, 1.0).unwrap();
        assert!(odd.evenness_residual() > 1e-3);
    }

    #[test]
    fn multiply_power_closed_form_pointwise() {
        let eta = bump_deriv(1, 1.0).unwrap();
        let eta3 = multiply_power(&eta, 2).unwrap();
        assert_eq!(eta3.n_order, 3);
        for &x in &[0.3, 2.0, -4.0] {
            let got = eta3.eval(x);
            let want = eta.eval(x) * (x * x);
            assert!((got - want).norm() < 1e-9 * want.norm().max(1e-6), "x={x}");
        }
    }

    #[test]
    fn multiply_power_zero_is_identity() {
        let eta = bump_deriv(1, 1.0).unwrap();
        let same = multiply_power(&eta, 0).unwrap();
        assert!((same.eval(1.3) - eta.eval(1.3)).norm() < 1e-15);
    }

    #[test]
    fn multiply_power_samples_pointwise_and_moments() {
        let eta = bump_deriv(1, 1.0).unwrap().to_samples();
        let eta2 = multiply_power(&eta, 1).unwrap();
        for &x in &[0.5, 2.0, -1.0] {
            let want = eta.eval(x) * x;
            let got = eta2.eval(x);
            assert!((got - want).norm() < 1e-8, "x={x}: {got} vs {want}");
        }
        assert!(eta2.moment_residual() < 1e-8);
        // raising a Theta~ profile by n certifies moments even when the input
        // had none
        let theta = divide_power(&bump_deriv(2, 1.0).unwrap(), 2).unwrap();
        assert_eq!(theta.n_order, 0);
        let raised = multiply_power(&theta, 2).unwrap();
        assert_eq!(raised.n_order, 2);
        assert!(raised.moment_residual() < 1e-8);
    }

    #[test]
    fn divide_power_closed_roundtrip_and_value() {
        let eta = bump_deriv(2, 1.0).unwrap();
        let div = divide_power(&eta, 2).unwrap();
        assert_eq!(div.n_order, 0);
        let back = multiply_power(&div, 2).unwrap();
        for &x in &[0.25, 1.0, -3.0, 8.0] {
            assert!((back.eval(x) - eta.eval(x)).norm() < 1e-9, "x={x}");
        }
        for &x in &[0.5, -2.0] {
            let want = eta.eval(x) / (x * x);
            assert!((div.eval(x) - want).norm() < 1e-9 * want.norm().max(1e-9));
        }
    }

    #[test]
    fn divide_power_samples_leakage_and_value_at_zero() {
        let eta = bump_deriv(2, 1.0).unwrap().to_samples();
        let div = divide_power(&eta, 2).unwrap();
        assert!(div.support_tail() < 1e-8, "leak {:e}", div.support_tail());
        let oracle = derivative_at_zero_oracle(&eta, 2);
        let got = div.eval(0.0).re;
        assert!((got - oracle).abs() < 1e-6 * oracle.abs().max(1e-3), "{got} vs {oracle}");
    }

    #[test]
    fn divide_power_requires_moment_order() {
        let eta = bump_deriv(1, 1.0).unwrap();
        assert!(matches!(divide_power(&eta, 2), Err(Error::Precondition(_))));
    }

    #[test]
    fn samples_roundtrip_divide_then_multiply() {
        let eta = bump_deriv(2, 1.0).unwrap().to_samples();
        let div = divide_power(&eta, 1).unwrap();
        let back = multiply_power(&div, 1).unwrap();
        for k in 0..=20 {
            let x = -10.0 + k as f64;
            let d = (back.eval(x) - eta.eval(x)).norm();
            assert!(d < 1e-8, "x={x}: {d:e}");
        }
    }

    #[test]
    fn cosine_atom_profile_even_nonnegative_normalized() {
        let eta = cosine_atom_profile(1, 1.0).unwrap();
        assert_eq!(eta.n_order, 2);
        assert!(eta.evenness_residual() < 1e-10);
        for &x in &[0.1, 0.7, 2.0, 5.0] {
            let v = eta.eval(x);
            assert!(v.im.abs() < 1e-10);
            assert!(v.re >= -1e-10, "eta({x}) = {v}");
            assert!((eta.eval(x) - eta.eval(-x)).norm() < 1e-10);
        }
        // normalization: \int_0^infty eta(t) t^2 e^{-t^2} dt/t = 1
        let pairing = crate::quad::adaptive_log_integral(1e-6, 40.0, 1e-11, |t| {
            eta.eval(t).re * t * t * (-t * t).exp()
        })
        .unwrap();
        assert!((pairing - 1.0).abs() < 1e-6, "pairing = {pairing}");
    }

    #[test]
    fn band_eval_large_argument_stays_accurate() {
        let eta = bump_deriv(2, 1.0).unwrap();
        let x = 150.0;
        let direct = eta.eval(x);
        let oracle = eval_oracle(&eta, x);
        assert!((direct - oracle).norm() < 1e-11, "{direct} vs {oracle}");
    }

    #[test]
    fn poisson_decay_certificate() {
        let psi = HoloProfile::poisson();
        let cert = verify_decay(&psi, &default_decay_grid()).unwrap();
        assert!(cert.c.is_finite() && cert.c > 0.0);
        // |psi(x)| = 2 pi |x| e^{-2 pi |x|} <= 2 pi |x| at sigma = 1
        assert!(cert.c <= std::f64::consts::TAU + 1e-9);
        assert!(holo_nondegenerate(&psi));
        // the two-half formula extends evenly to the real line
        for &x in &[0.3, 1.0, 2.5] {
            assert!((psi.eval(x) - psi.eval(-x)).norm() < 1e-14);
        }
    }

    #[test]
    fn zero_profile_degenerate() {
        let zero = HoloProfile::custom(1.0, 1.0, 0.7, Arc::new(|_| C64::new(0.0, 0.0)));
        let cert = verify_decay(&zero, &default_decay_grid()).unwrap();
        assert_eq!(cert.c, 0.0);
        assert!(!holo_nondegenerate(&zero));
    }

    #[test]
    fn rational_profile_fitted_constant() {
        // oracle: ratio -> 1 at both ends of the envelope, < 1 between
        let psi = HoloProfile::rational_one_three();
        let cert = verify_decay(&psi, &default_decay_grid()).unwrap();
        assert!((cert.c - 1.0).abs() < 1e-3, "C = {}", cert.c);
    }

    #[test]
    fn decay_grid_span_enforced() {
        let psi = HoloProfile::poisson();
        assert!(verify_decay(&psi, &[0.1, 1.0, 10.0]).is_err());
    }
}
