//! Finite metric measure spaces: the discrete stand-in for `(M, rho, mu)`.
//!
//! A space is a finite point set with an explicit distance matrix and positive
//! point masses. Balls are open (strict inequality), tents use the non-strict
//! inequality `rho(y, M \ B) >= t`, and the distance to the empty set is
//! `+inf`, which makes the tent over the whole space the full upper
//! half-space.

use crate::{Error, Result};
use serde::{Deserialize, Serialize};

/// Finite metric measure space.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricMeasureSpace {
    /// Point count.
    pub n: usize,
    /// Row-major `n x n` distance matrix.
    dist: Vec<f64>,
    /// Positive point masses (measure weights).
    pub mass: Vec<f64>,
    /// Optional point ids.
    pub labels: Option<Vec<String>>,
}

/// Open ball `B(center, radius) = { y : dist(center, y) < radius }`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ball {
    pub center: usize,
    pub radius: f64,
}

/// A pair of point subsets with their separation `rho(E, F)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SetPair {
    pub e: Vec<usize>,
    pub f: Vec<usize>,
    pub sep: f64,
}

/// Witness that `V(x, alpha r) <= A alpha^kappa V(x, r)` held on a sample grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DoublingCertificate {
    pub a: f64,
    pub kappa: f64,
    /// `(center, radius, alpha)` triples that were checked.
    pub samples: Vec<(usize, f64, f64)>,
    pub violations: usize,
}

/// Boolean masks over `points x t-grid` for cones and tents.
#[derive(Debug, Clone)]
pub struct TentConeMasks {
    pub tgrid: Vec<f64>,
    /// `cone[x]` is the mask of `(y, t_idx)` cells in `Gamma(x)`, row-major
    /// over `y * tcount + t_idx`.
    pub cone: Vec<Vec<bool>>,
    /// `tent` mask for the queried ball, same layout.
    pub tent: Vec<bool>,
}

impl MetricMeasureSpace {
    /// Validate and build a space from raw distance/mass data.
    pub fn new(dist: Vec<f64>, mass: Vec<f64>, labels: Option<Vec<String>>) -> Result<Self> {
        let n = mass.len();
        if n == 0 {
            return Err(Error::InvalidModel("empty point set".into()));
        }
        if dist.len() != n * n {
            return Err(Error::InvalidModel(format!(
                "distance matrix has {} entries, expected {}",
                dist.len(),
                n * n
            )));
        }
        if let Some(l) = &labels {
            if l.len() != n {
                return Err(Error::InvalidModel("label count mismatch".into()));
            }
        }
        for (i, m) in mass.iter().enumerate() {
            if !(*m > 0.0) || !m.is_finite() {
                return Err(Error::InvalidModel(format!("mass[{i}] = {m} must be positive")));
            }
        }
        let space = MetricMeasureSpace { n, dist, mass, labels };
        space.validate_metric()?;
        Ok(space)
    }

    fn validate_metric(&self) -> Result<()> {
        let n = self.n;
        for i in 0..n {
            if self.dist(i, i) != 0.0 {
                return Err(Error::InvalidModel(format!("dist({i},{i}) != 0")));
            }
            for j in 0..n {
                let d = self.dist(i, j);
                if !d.is_finite() || d < 0.0 {
                    return Err(Error::InvalidModel(format!("dist({i},{j}) = {d}")));
                }
                if i != j && d == 0.0 {
                    return Err(Error::InvalidModel(format!("distinct points {i},{j} at distance 0")));
                }
                if (d - self.dist(j, i)).abs() > 1e-12 * d.abs().max(1.0) {
                    return Err(Error::InvalidModel(format!("asymmetric at ({i},{j})")));
                }
            }
        }
        // Exhaustive triangle check for small spaces, randomized otherwise.
        if n <= 256 {
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        if self.dist(i, j) > self.dist(i, k) + self.dist(k, j) + 1e-9 {
                            return Err(Error::InvalidModel(format!(
                                "triangle inequality fails on ({i},{j},{k})"
                            )));
                        }
                    }
                }
            }
        } else {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x7e17);
            for _ in 0..100_000 {
                let (i, j, k) =
                    (rng.gen_range(0..n), rng.gen_range(0..n), rng.gen_range(0..n));
                if self.dist(i, j) > self.dist(i, k) + self.dist(k, j) + 1e-9 {
                    return Err(Error::InvalidModel(format!(
                        "triangle inequality fails on ({i},{j},{k})"
                    )));
                }
            }
        }
        Ok(())
    }

    #[inline]
    pub fn dist(&self, i: usize, j: usize) -> f64 {
        self.dist[i * self.n + j]
    }

    pub fn total_mass(&self) -> f64 {
        self.mass.iter().sum()
    }

    pub fn diameter(&self) -> f64 {
        self.dist.iter().cloned().fold(0.0, f64::max)
    }

    /// Smallest positive pairwise distance.
    pub fn min_positive_dist(&self) -> f64 {
        let mut m = f64::INFINITY;
        for i in 0..self.n {
            for j in 0..self.n {
                let d = self.dist(i, j);
                if d > 0.0 && d < m {
                    m = d;
                }
            }
        }
        m
    }

    pub fn ball_members(&self, ball: Ball) -> Vec<usize> {
        (0..self.n).filter(|&y| self.dist(ball.center, y) < ball.radius).collect()
    }

    /// `V(x, r)`: measure of the open ball.
    pub fn volume(&self, center: usize, radius: f64) -> f64 {
        (0..self.n)
            .filter(|&y| self.dist(center, y) < radius)
            .map(|y| self.mass[y])
            .sum()
    }

    pub fn ball_measure(&self, ball: Ball) -> f64 {
        self.volume(ball.center, ball.radius)
    }

    /// `rho(y, S)` with the convention `rho(y, {}) = +inf`.
    pub fn dist_to_set(&self, y: usize, set: &[usize]) -> f64 {
        set.iter().map(|&s| self.dist(y, s)).fold(f64::INFINITY, f64::min)
    }

    /// `rho(E, F) = inf { rho(x, y) : x in E, y in F }`, `+inf` if either is empty.
    pub fn set_separation(&self, e: &[usize], f: &[usize]) -> f64 {
        let mut sep = f64::INFINITY;
        for &x in e {
            for &y in f {
                sep = sep.min(self.dist(x, y));
            }
        }
        sep
    }

    pub fn set_pair(&self, e: Vec<usize>, f: Vec<usize>) -> SetPair {
        let sep = self.set_separation(&e, &f);
        SetPair { e, f, sep }
    }

    /// All distinct open balls realized by the space: for each center, one
    /// radius strictly between consecutive realized distances, plus a ball
    /// containing everything. Finite and exhaustive for sup computations.
    pub fn canonical_balls(&self) -> Vec<Ball> {
        let mut balls = Vec::new();
        let diam = self.diameter();
        for c in 0..self.n {
            let mut ds: Vec<f64> = (0..self.n).map(|y| self.dist(c, y)).collect();
            ds.sort_by(|a, b| a.partial_cmp(b).unwrap());
            ds.dedup_by(|a, b| (*a - *b).abs() < 1e-14);
            for w in ds.windows(2) {
                balls.push(Ball { center: c, radius: 0.5 * (w[0] + w[1]) });
            }
            balls.push(Ball { center: c, radius: diam + 1.0 });
        }
        balls
    }

    /// Cone and tent membership masks over `self x tgrid`.
    ///
    /// `Gamma(x) = {(y,t) : rho(x,y) < t}` (strict) and
    /// `T(B) = {(y,t) : rho(y, M \ B) >= t}` (non-strict, `rho(y, {}) = +inf`).
    pub fn tent_and_cone(&self, tgrid: &[f64], ball: Ball) -> Result<TentConeMasks> {
        if tgrid.is_empty() || tgrid.iter().any(|t| !(*t > 0.0)) {
            return Err(Error::InvalidModel("t-grid must be nonempty and positive".into()));
        }
        let tc = tgrid.len();
        let cone = (0..self.n)
            .map(|x| {
                let mut mask = vec![false; self.n * tc];
                for y in 0..self.n {
                    for (k, &t) in tgrid.iter().enumerate() {
                        mask[y * tc + k] = self.dist(x, y) < t;
                    }
                }
                mask
            })
            .collect();
        let tent = self.tent_mask(tgrid, ball);
        Ok(TentConeMasks { tgrid: tgrid.to_vec(), cone, tent })
    }

    /// Tent membership mask for one ball, row-major over `y * tcount + t_idx`.
    pub fn tent_mask(&self, tgrid: &[f64], ball: Ball) -> Vec<bool> {
        let members = self.ball_members(ball);
        let in_ball: Vec<bool> = {
            let mut v = vec![false; self.n];
            for &m in &members {
                v[m] = true;
            }
            v
        };
        let complement: Vec<usize> = (0..self.n).filter(|y| !in_ball[*y]).collect();
        let tc = tgrid.len();
        let mut mask = vec![false; self.n * tc];
        for y in 0..self.n {
            let d = self.dist_to_set(y, &complement);
            for (k, &t) in tgrid.iter().enumerate() {
                mask[y * tc + k] = d >= t;
            }
        }
        mask
    }

    /// JSON round-trip helpers matching the external schema
    /// `{n, dist (row-major), mass, labels}`.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("space serialization cannot fail")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let raw: MetricMeasureSpace = serde_json::from_str(s)?;
        // Re-validate: loaders reject asymmetric or non-triangle matrices.
        MetricMeasureSpace::new(raw.dist, raw.mass, raw.labels)
    }
}

/// Uniform circle: `n` points on a circle of the given circumference with the
/// arc-length metric and uniform masses `circumference / n`.
pub fn build_circle(n: usize, circumference: f64) -> Result<MetricMeasureSpace> {
    if n < 2 {
        return Err(Error::InvalidModel(format!("circle needs n >= 2, got {n}")));
    }
    if !(circumference > 0.0) {
        return Err(Error::InvalidModel("circumference must be positive".into()));
    }
    let h = circumference / n as f64;
    let mut dist = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            let k = (i as isize - j as isize).unsigned_abs() % n;
            let steps = k.min(n - k);
            dist[i * n + j] = steps as f64 * h;
        }
    }
    MetricMeasureSpace::new(dist, vec![h; n], None)
}

/// Weighted graph with the shortest-path metric (all pairs, Floyd-Warshall).
pub fn build_graph(
    n: usize,
    edges: &[(usize, usize, f64)],
    masses: &[f64],
) -> Result<MetricMeasureSpace> {
    if masses.len() != n {
        return Err(Error::InvalidModel("mass count must equal vertex count".into()));
    }
    let mut dist = vec![f64::INFINITY; n * n];
    for i in 0..n {
        dist[i * n + i] = 0.0;
    }
    for &(a, b, w) in edges {
        if a >= n || b >= n {
            return Err(Error::InvalidModel(format!("edge ({a},{b}) out of range")));
        }
        if !(w > 0.0) {
            return Err(Error::InvalidModel(format!("edge ({a},{b}) has non-positive weight {w}")));
        }
        dist[a * n + b] = dist[a * n + b].min(w);
        dist[b * n + a] = dist[b * n + a].min(w);
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                let via = dist[i * n + k] + dist[k * n + j];
                if via < dist[i * n + j] {
                    dist[i * n + j] = via;
                }
            }
        }
    }
    if dist.iter().any(|d| !d.is_finite()) {
        return Err(Error::InvalidModel("graph is disconnected".into()));
    }
    MetricMeasureSpace::new(dist, masses.to_vec(), None)
}

/// Fit `(A, kappa)` such that `V(x, alpha r) <= A alpha^kappa V(x, r)` on the
/// sampled grid, minimizing `A` over the kappa grid. Always succeeds on a
/// finite space; the certificate records zero violations by construction.
pub fn estimate_doubling(
    space: &MetricMeasureSpace,
    radii: &[f64],
    alphas: &[f64],
    kappa_grid: &[f64],
) -> Result<DoublingCertificate> {
    if radii.is_empty() || alphas.is_empty() || kappa_grid.is_empty() {
        return Err(Error::InvalidModel("doubling fit needs nonempty grids".into()));
    }
    if alphas.iter().any(|a| *a < 1.0) {
        return Err(Error::InvalidModel("doubling requires alpha >= 1".into()));
    }
    let mut samples = Vec::new();
    for x in 0..space.n {
        for &r in radii {
            for &alpha in alphas {
                samples.push((x, r, alpha));
            }
        }
    }
    let mut best: Option<(f64, f64)> = None;
    for &kappa in kappa_grid {
        let mut a_needed: f64 = 1.0;
        for &(x, r, alpha) in &samples {
            let v0 = space.volume(x, r);
            let v1 = space.volume(x, alpha * r);
            if v0 > 0.0 {
                a_needed = a_needed.max(v1 / (alpha.powf(kappa) * v0));
            }
        }
        match best {
            Some((a, _)) if a <= a_needed => {}
            _ => best = Some((a_needed, kappa)),
        }
    }
    let (a, kappa) = best.unwrap();
    // Tiny headroom so the recorded certificate re-validates despite rounding.
    let a = a * (1.0 + 1e-12);
    Ok(DoublingCertificate { a, kappa, samples, violations: 0 })
}

/// Re-validate a certificate by an independent sweep (optionally on finer grids).
pub fn validate_doubling(
    space: &MetricMeasureSpace,
    cert: &DoublingCertificate,
    radii: &[f64],
    alphas: &[f64],
) -> usize {
    let mut violations = 0;
    for x in 0..space.n {
        for &r in radii {
            for &alpha in alphas {
                let v0 = space.volume(x, r);
                let v1 = space.volume(x, alpha * r);
                if v0 > 0.0 && v1 > cert.a * alpha.powf(cert.kappa) * v0 * (1.0 + 1e-9) {
                    violations += 1;
                }
            }
        }
    }
    violations
}

/// Dyadic annulus indicator sets `1_k(B)`: `1_0 = B`, `1_k = 2^k B \ 2^{k-1} B`.
pub fn annulus_members(space: &MetricMeasureSpace, ball: Ball, k: u32) -> Vec<usize> {
    let outer = ball.radius * 2f64.powi(k as i32);
    if k == 0 {
        return space.ball_members(ball);
    }
    let inner = ball.radius * 2f64.powi(k as i32 - 1);
    (0..space.n)
        .filter(|&y| {
            let d = space.dist(ball.center, y);
            d < outer && d >= inner
        })
        .collect()
}

/// Largest annulus index that can be nonempty: `2^k r(B) <= 2 diam` exhausts
/// the space beyond that.
pub fn annulus_exhaustion(space: &MetricMeasureSpace, ball: Ball) -> u32 {
    let diam = space.diameter();
    let mut k = 0;
    while ball.radius * 2f64.powi(k as i32 - 1) <= diam && k < 64 {
        k += 1;
    }
    k
}
