//! Model self-adjoint operators carried with full spectral data.
//!
//! An operator here is a finite-dimensional stand-in for a self-adjoint `D`
//! or nonnegative `L` on `L^2(V)`: a complete set of eigenvalues with an
//! eigenbasis orthonormal in a (possibly weighted) inner product. The weight
//! handles the modified metric of the first-order `BD` system, where `BD` is
//! self-adjoint only after reweighting by `B`.
//!
//! The inner product is `<u, v>_w = sum_i g_i conj(v_i) u_i`, with diagonal
//! Gram entries `g = mass x (fiber weight)^{-1}`. Sections with fiber
//! dimension `f` are stored in block layout: entry `c*n + p` is component `c`
//! at point `p`.

use crate::mspace::{build_circle, MetricMeasureSpace};
use crate::{C64, Error, Result};
use nalgebra::{DMatrix, DVector};
use std::sync::Arc;

pub type Section = DVector<C64>;

/// Self-adjoint operator with explicit spectral decomposition.
#[derive(Clone)]
pub struct SelfAdjointOperator {
    pub dim: usize,
    pub fiber_dim: usize,
    pub space: Arc<MetricMeasureSpace>,
    /// Sorted ascending; the sectoriality angle is 0 (real spectrum).
    pub eigenvalues: Vec<f64>,
    /// Columns orthonormal w.r.t. the weighted inner product.
    basis: DMatrix<C64>,
    /// `basis^H * diag(gram)`; spectral coefficients are `dual * u`.
    dual: DMatrix<C64>,
    /// Diagonal Gram entries of the inner product.
    pub gram: DVector<f64>,
    /// Model metadata for reports and serialization.
    pub model: String,
}

impl SelfAdjointOperator {
    /// Build from explicit spectral data, validating orthonormality.
    pub fn from_spectral(
        space: Arc<MetricMeasureSpace>,
        fiber_dim: usize,
        eigenvalues: Vec<f64>,
        basis: DMatrix<C64>,
        gram: DVector<f64>,
        model: impl Into<String>,
    ) -> Result<Self> {
        let dim = eigenvalues.len();
        if basis.nrows() != dim || basis.ncols() != dim || gram.len() != dim {
            return Err(Error::InvalidModel("spectral data dimension mismatch".into()));
        }
        if space.n * fiber_dim != dim {
            return Err(Error::InvalidModel(format!(
                "dim {} != space points {} x fiber {}",
                dim, space.n, fiber_dim
            )));
        }
        if gram.iter().any(|g| !(*g > 0.0)) {
            return Err(Error::InvalidModel("gram entries must be positive".into()));
        }
        let gmat = DMatrix::from_diagonal(&gram.map(|g| C64::new(g, 0.0)));
        let dual = basis.adjoint() * gmat;
        let op = SelfAdjointOperator {
            dim,
            fiber_dim,
            space,
            eigenvalues,
            basis,
            dual,
            gram,
            model: model.into(),
        };
        let orth = (&op.dual * &op.basis - DMatrix::<C64>::identity(dim, dim)).norm();
        if orth > 1e-10 * (dim as f64).sqrt() {
            return Err(Error::InvalidModel(format!(
                "eigenbasis not orthonormal under the declared inner product: residual {orth:e}"
            )));
        }
        Ok(op)
    }

    /// Diagonalize a matrix that is self-adjoint w.r.t. the diagonal Gram `g`,
    /// via the symmetrized operator `G^{1/2} M G^{-1/2}`.
    pub fn from_matrix(
        space: Arc<MetricMeasureSpace>,
        fiber_dim: usize,
        matrix: &DMatrix<C64>,
        gram: DVector<f64>,
        model: impl Into<String>,
    ) -> Result<Self> {
        let dim = matrix.nrows();
        if matrix.ncols() != dim || gram.len() != dim {
            return Err(Error::InvalidModel("matrix/gram dimension mismatch".into()));
        }
        let g_half = gram.map(f64::sqrt);
        let mut sym = matrix.clone();
        for i in 0..dim {
            for j in 0..dim {
                sym[(i, j)] *= C64::new(g_half[i] / g_half[j], 0.0);
            }
        }
        let herm_res = (&sym - sym.adjoint()).norm() / sym.norm().max(1e-300);
        if herm_res > 1e-10 {
            return Err(Error::InvalidModel(format!(
                "matrix is not self-adjoint under the declared inner product: residual {herm_res:e}"
            )));
        }
        // Enforce exact Hermitian symmetry before the eigensolve.
        let sym = (sym.clone() + sym.adjoint()) * C64::new(0.5, 0.0);
        let se = sym.symmetric_eigen();
        let mut order: Vec<usize> = (0..dim).collect();
        order.sort_by(|&a, &b| se.eigenvalues[a].partial_cmp(&se.eigenvalues[b]).unwrap());
        let eigenvalues: Vec<f64> = order.iter().map(|&k| se.eigenvalues[k]).collect();
        let mut basis = DMatrix::<C64>::zeros(dim, dim);
        for (col, &k) in order.iter().enumerate() {
            for i in 0..dim {
                basis[(i, col)] = se.eigenvectors[(i, k)] / C64::new(g_half[i], 0.0);
            }
        }
        Self::from_spectral(space, fiber_dim, eigenvalues, basis, gram, model)
    }

    pub fn lambda_max_abs(&self) -> f64 {
        self.eigenvalues.iter().fold(0.0f64, |m, l| m.max(l.abs()))
    }

    /// Default kernel threshold separating `N(D)` from the near-kernel.
    pub fn lambda_tol_default(&self) -> f64 {
        1e-10 * self.lambda_max_abs().max(1.0)
    }

    /// Weighted inner product `<u, v>_w`.
    pub fn ip(&self, u: &Section, v: &Section) -> C64 {
        let mut acc = C64::new(0.0, 0.0);
        for i in 0..self.dim {
            acc += v[i].conj() * u[i] * self.gram[i];
        }
        acc
    }

    pub fn norm_w(&self, u: &Section) -> f64 {
        self.ip(u, u).re.max(0.0).sqrt()
    }

    /// Spectral coefficients `<u, v_j>_w`.
    pub fn coefficients(&self, u: &Section) -> DVector<C64> {
        &self.dual * u
    }

    pub fn synthesize(&self, coeffs: &DVector<C64>) -> Section {
        &self.basis * coeffs
    }

    pub fn eigenvector(&self, j: usize) -> Section {
        self.basis.column(j).into_owned()
    }

    /// Borel functional calculus: `f(D) u = sum_j f(lambda_j) <u, v_j>_w v_j`.
    pub fn spectral_apply<F: Fn(f64) -> C64>(&self, f: F, u: &Section) -> Result<Section> {
        let mut coeffs = self.coefficients(u);
        for (j, lambda) in self.eigenvalues.iter().enumerate() {
            let val = f(*lambda);
            if !val.re.is_finite() || !val.im.is_finite() {
                return Err(Error::Evaluation {
                    eigenvalue: *lambda,
                    reason: "function not finite on spectrum".into(),
                });
            }
            coeffs[j] *= val;
        }
        Ok(self.synthesize(&coeffs))
    }

    /// Apply the operator itself.
    pub fn apply(&self, u: &Section) -> Section {
        self.spectral_apply(|l| C64::new(l, 0.0), u).expect("identity map is finite")
    }

    /// Apply `D^n` by `n` successive applications.
    pub fn apply_power(&self, n: u32, u: &Section) -> Section {
        let mut v = u.clone();
        for _ in 0..n {
            v = self.apply(&v);
        }
        v
    }

    /// Dense matrix of `f(D)` in the standard basis.
    pub fn to_dense<F: Fn(f64) -> C64>(&self, f: F) -> DMatrix<C64> {
        let d = DMatrix::from_diagonal(&DVector::from_iterator(
            self.dim,
            self.eigenvalues.iter().map(|l| f(*l)),
        ));
        &self.basis * d * &self.dual
    }

    /// Projector onto the span of eigenvectors with `|lambda| > lambda_tol`.
    pub fn project_range(&self, lambda_tol: f64, u: &Section) -> Section {
        self.spectral_apply(
            |l| if l.abs() > lambda_tol { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) },
            u,
        )
        .expect("indicator is finite")
    }

    pub fn project_kernel(&self, lambda_tol: f64, u: &Section) -> Section {
        self.spectral_apply(
            |l| if l.abs() <= lambda_tol { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) },
            u,
        )
        .expect("indicator is finite")
    }

    /// Rank of the range projector at the given threshold.
    pub fn range_rank(&self, lambda_tol: f64) -> usize {
        self.eigenvalues.iter().filter(|l| l.abs() > lambda_tol).count()
    }

    /// Resolvent `(zI - D)^{-1} u`; refuses `z` within `1e-12` (relative to the
    /// spectral radius) of an eigenvalue.
    pub fn resolvent(&self, z: C64, u: &Section) -> Result<Section> {
        let scale = self.lambda_max_abs().max(1.0);
        for lambda in &self.eigenvalues {
            let dist = (z - C64::new(*lambda, 0.0)).norm();
            if dist < 1e-12 * scale {
                return Err(Error::NearSingular { z, eigenvalue: *lambda, dist });
            }
        }
        self.spectral_apply(|l| (z - C64::new(l, 0.0)).inv(), u)
    }

    /// Unitary group `e^{itD} u`.
    pub fn group(&self, t: f64, u: &Section) -> Section {
        self.spectral_apply(|l| C64::new(0.0, t * l).exp(), u).expect("exponential is finite")
    }

    /// Spectral square root; requires a nonnegative spectrum up to roundoff.
    pub fn sqrt_nonneg(&self) -> Result<SelfAdjointOperator> {
        let tol = 1e-9 * self.lambda_max_abs().max(1.0);
        if self.eigenvalues.iter().any(|l| *l < -tol) {
            return Err(Error::Precondition(format!(
                "operator has negative eigenvalue {:e}; square root undefined",
                self.eigenvalues[0]
            )));
        }
        let eigenvalues = self.eigenvalues.iter().map(|l| l.max(0.0).sqrt()).collect();
        SelfAdjointOperator::from_spectral(
            self.space.clone(),
            self.fiber_dim,
            eigenvalues,
            self.basis.clone(),
            self.gram.clone(),
            format!("sqrt({})", self.model),
        )
    }

    /// Entry indices (block layout) for a set of points, all fiber components.
    pub fn entries_for_points(&self, points: &[usize]) -> Vec<usize> {
        let n = self.space.n;
        let mut idx = Vec::with_capacity(points.len() * self.fiber_dim);
        for c in 0..self.fiber_dim {
            for &p in points {
                idx.push(c * n + p);
            }
        }
        idx
    }

    /// Operator norm of the masked block `1_E f(D) 1_F` in the weighted norm,
    /// computed as the largest singular value of the similarity-transformed
    /// block (power iteration with a dense eigensolve fallback).
    pub fn masked_norm<F: Fn(f64) -> C64>(&self, f: F, e_pts: &[usize], f_pts: &[usize]) -> f64 {
        let m = self.to_dense(f);
        let rows = self.entries_for_points(e_pts);
        let cols = self.entries_for_points(f_pts);
        if rows.is_empty() || cols.is_empty() {
            return 0.0;
        }
        let g_half = self.gram.map(f64::sqrt);
        let mut block = DMatrix::<C64>::zeros(rows.len(), cols.len());
        for (bi, &i) in rows.iter().enumerate() {
            for (bj, &j) in cols.iter().enumerate() {
                block[(bi, bj)] = m[(i, j)] * C64::new(g_half[i] / g_half[j], 0.0);
            }
        }
        largest_singular_value(&block)
    }

    /// L^2(mu) -> L^infinity operator norm of `f(D)` (max weighted row norm).
    pub fn l2_to_linf_norm<F: Fn(f64) -> C64>(&self, f: F) -> f64 {
        let m = self.to_dense(f);
        let mut best: f64 = 0.0;
        for i in 0..self.dim {
            let mut row = 0.0;
            for j in 0..self.dim {
                // kernel w.r.t. measure: K(i,j) = M_ij / g_j, row norm in L^2(g)
                row += m[(i, j)].norm_sqr() / self.gram[j];
            }
            best = best.max(row.sqrt());
        }
        best
    }

    /// Weighted L^1 norm `sum_i g_i |u_i|`.
    pub fn norm_l1(&self, u: &Section) -> f64 {
        (0..self.dim).map(|i| self.gram[i] * u[i].norm()).sum()
    }

    pub fn norm_linf(&self, u: &Section) -> f64 {
        u.iter().fold(0.0f64, |m, x| m.max(x.norm()))
    }
}

/// Largest singular value via power iteration on `B^H B` to 1e-10 relative,
/// with a deterministic start and a dense eigensolve fallback.
pub fn largest_singular_value(block: &DMatrix<C64>) -> f64 {
    let n = block.ncols();
    let fro = block.norm();
    if fro == 0.0 {
        return 0.0;
    }
    let mut v = DVector::<C64>::from_iterator(
        n,
        (0..n).map(|i| C64::new(1.0 + (i as f64) / (n as f64 + 1.0), 0.3 * ((i % 3) as f64))),
    );
    v /= C64::new(v.norm(), 0.0);
    let mut prev = 0.0f64;
    for it in 0..2000 {
        let bv = block * &v;
        let w = block.adjoint() * bv;
        let norm = w.norm();
        if norm == 0.0 {
            return 0.0;
        }
        let sigma = norm.sqrt();
        if it > 2 && (sigma - prev).abs() <= 1e-10 * sigma.max(1e-300) {
            return sigma;
        }
        prev = sigma;
        v = w / C64::new(norm, 0.0);
    }
    // Dense fallback for stalled iterations (tight eigenvalue clusters).
    if n <= 512 {
        let h = block.adjoint() * block;
        let se = h.symmetric_eigen();
        se.eigenvalues.iter().fold(0.0f64, |m, l| m.max(l.max(0.0))).sqrt()
    } else {
        prev
    }
}

/// Discrete `-i d/dx` on the n-point circle, diagonal in the Fourier basis.
///
/// Frequencies are integers scaled by `2 pi / circumference`; for even `n` the
/// Nyquist mode is assigned `+pi/h`. The group `e^{itD}` acts as exact
/// circular translation for grid-commensurate `t`, which is what makes this
/// the canonical unit propagation speed model.
pub fn circle_derivative(n: usize, circumference: f64) -> Result<SelfAdjointOperator> {
    let space = Arc::new(build_circle(n, circumference)?);
    let scale = std::f64::consts::TAU / circumference;
    let mut freqs: Vec<i64> = Vec::with_capacity(n);
    let half = n as i64 / 2;
    if n % 2 == 0 {
        freqs.extend(-(half - 1)..=half);
    } else {
        freqs.extend(-half..=half);
    }
    freqs.sort_unstable();
    let eigenvalues: Vec<f64> = freqs.iter().map(|k| *k as f64 * scale).collect();
    let norm = circumference.sqrt();
    let mut basis = DMatrix::<C64>::zeros(n, n);
    for (col, &k) in freqs.iter().enumerate() {
        for j in 0..n {
            let phase = std::f64::consts::TAU * (k as f64) * (j as f64) / (n as f64);
            basis[(j, col)] = C64::new(0.0, phase).exp() / C64::new(norm, 0.0);
        }
    }
    let h = circumference / n as f64;
    let gram = DVector::from_element(n, h);
    SelfAdjointOperator::from_spectral(
        space,
        1,
        eigenvalues,
        basis,
        gram,
        format!("circle_derivative(n={n}, circumference={circumference})"),
    )
}

/// Hodge-Dirac block operator `[[0, d^T], [d, 0]]` on 0-forms + 1-forms of a
/// graph, realized on the metric space of vertices and edge midpoints.
///
/// `incidence` is edge x vertex with arbitrary real entries; optional weights
/// scale edge rows by `sqrt(w)`. Unit masses, unit edge lengths for the
/// metric.
pub fn hodge_dirac_graph(
    n_vertices: usize,
    incidence: &[Vec<f64>],
    weights: Option<&[f64]>,
) -> Result<SelfAdjointOperator> {
    let n_edges = incidence.len();
    if n_edges == 0 || n_vertices == 0 {
        return Err(Error::InvalidModel("need at least one edge and one vertex".into()));
    }
    for row in incidence {
        if row.len() != n_vertices {
            return Err(Error::InvalidModel(format!(
                "incidence row has {} entries, expected {}",
                row.len(),
                n_vertices
            )));
        }
    }
    if let Some(w) = weights {
        if w.len() != n_edges {
            return Err(Error::InvalidModel("weight count must equal edge count".into()));
        }
        if w.iter().any(|x| !(*x > 0.0)) {
            return Err(Error::InvalidModel("edge weights must be positive".into()));
        }
    }
    let dim = n_vertices + n_edges;
    let mut mat = DMatrix::<C64>::zeros(dim, dim);
    for (e, row) in incidence.iter().enumerate() {
        let w = weights.map_or(1.0, |w| w[e].sqrt());
        for (v, &c) in row.iter().enumerate() {
            let val = C64::new(w * c, 0.0);
            mat[(n_vertices + e, v)] = val; // d: 0-forms -> 1-forms
            mat[(v, n_vertices + e)] = val; // d^T
        }
    }
    // Metric space: vertices then edge midpoints; vertex-midpoint distance 1/2
    // along incident edges (entries with nonzero incidence).
    let mut edges = Vec::new();
    for (e, row) in incidence.iter().enumerate() {
        for (v, &c) in row.iter().enumerate() {
            if c != 0.0 {
                edges.push((v, n_vertices + e, 0.5));
            }
        }
    }
    let space = Arc::new(crate::mspace::build_graph(dim, &edges, &vec![1.0; dim])?);
    let gram = DVector::from_element(dim, 1.0);
    SelfAdjointOperator::from_matrix(
        space,
        1,
        &mat,
        gram,
        format!("hodge_dirac_graph(v={n_vertices}, e={n_edges})"),
    )
}

/// Periodic 1-D divergence-form model on `[0,1)`: the scalar operator
/// `L = -div A grad`, its companion `Ltilde = -A grad div`, and the
/// first-order system `BD` self-adjoint in the `B`-weighted metric.
pub struct DivergenceFormModel {
    pub n: usize,
    pub coeff: Vec<f64>,
    pub lambda: f64,
    pub l: SelfAdjointOperator,
    pub l_tilde: DMatrix<f64>,
    pub bd: SelfAdjointOperator,
    /// Dense `(BD)^2` for block-structure checks.
    pub bd_squared: DMatrix<f64>,
    pub l_matrix: DMatrix<f64>,
}

pub fn divergence_form_1d(n: usize, coeff: &[f64], lambda: f64) -> Result<DivergenceFormModel> {
    if n < 2 {
        return Err(Error::InvalidModel("mesh needs n >= 2".into()));
    }
    if coeff.len() != n {
        return Err(Error::InvalidModel("need one coefficient per cell edge".into()));
    }
    if !(lambda > 0.0) || coeff.iter().any(|a| *a < lambda) {
        return Err(Error::InvalidModel(format!(
            "ellipticity violated: require A(x) >= lambda > 0, lambda = {lambda}"
        )));
    }
    let h = 1.0 / n as f64;
    // grad: edge e = (e, e+1); (grad u)_e = (u_{e+1} - u_e)/h
    let mut grad = DMatrix::<f64>::zeros(n, n);
    for e in 0..n {
        grad[(e, e)] = -1.0 / h;
        grad[(e, (e + 1) % n)] = 1.0 / h;
    }
    let a_diag = DMatrix::from_diagonal(&DVector::from_row_slice(coeff));
    let l_matrix = grad.transpose() * &a_diag * &grad;
    let l_tilde = &a_diag * &grad * grad.transpose();

    let space = Arc::new(build_circle(n, 1.0)?);
    let gram_l = DVector::from_element(n, h);
    let l = SelfAdjointOperator::from_matrix(
        space.clone(),
        1,
        &l_matrix.map(|x| C64::new(x, 0.0)),
        gram_l,
        format!("divergence_form_1d(n={n}).L"),
    )?;

    // BD in block layout: scalar part first, edge part second.
    let mut bd_mat = DMatrix::<f64>::zeros(2 * n, 2 * n);
    let minus_div = grad.transpose();
    let a_grad = &a_diag * &grad;
    for i in 0..n {
        for j in 0..n {
            bd_mat[(i, n + j)] = minus_div[(i, j)];
            bd_mat[(n + i, j)] = a_grad[(i, j)];
        }
    }
    let bd_squared = &bd_mat * &bd_mat;
    let mut gram_bd = DVector::from_element(2 * n, h);
    for i in 0..n {
        gram_bd[n + i] = h / coeff[i];
    }
    let bd = SelfAdjointOperator::from_matrix(
        space,
        2,
        &bd_mat.map(|x| C64::new(x, 0.0)),
        gram_bd,
        format!("divergence_form_1d(n={n}).BD"),
    )?;

    Ok(DivergenceFormModel {
        n,
        coeff: coeff.to_vec(),
        lambda,
        l,
        l_tilde,
        bd,
        bd_squared,
        l_matrix,
    })
}

/// Relative Frobenius residual of `(BD)^2` against `diag(L, Ltilde)`.
pub fn bd_square_block_residual(model: &DivergenceFormModel) -> f64 {
    let n = model.n;
    let mut expected = DMatrix::<f64>::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            expected[(i, j)] = model.l_matrix[(i, j)];
            expected[(n + i, n + j)] = model.l_tilde[(i, j)];
        }
    }
    (&model.bd_squared - &expected).norm() / expected.norm()
}

/// Random Hermitian operator on a unit-mass circle space (identity Gram),
/// used by calculus identity suites.
pub fn random_hermitian(dim: usize, seed: u64) -> Result<SelfAdjointOperator> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut m = DMatrix::<C64>::zeros(dim, dim);
    for i in 0..dim {
        for j in 0..dim {
            m[(i, j)] = C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        }
    }
    let herm = (m.clone() + m.adjoint()) * C64::new(0.5, 0.0);
    let space = Arc::new(build_circle(dim, dim as f64)?);
    let gram = DVector::from_element(dim, 1.0);
    SelfAdjointOperator::from_matrix(space, 1, &herm, gram, format!("random_hermitian({dim}, {seed})"))
}

/// Random section with the given seed.
pub fn random_section(dim: usize, seed: u64) -> Section {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    DVector::from_iterator(
        dim,
        (0..dim).map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))),
    )
}

// --- serialization -----------------------------------------------------------

#[derive(serde::Serialize, serde::Deserialize)]
struct OperatorJson {
    dim: usize,
    eigenvalues: Vec<f64>,
    /// Row-major, complex as [re, im].
    eigenbasis: Vec<[f64; 2]>,
    /// Diagonal weight `W` with `<u,v>_w = v^H W^{-1} u`; omitted if identity.
    #[serde(skip_serializing_if = "Option::is_none")]
    ip_weight: Option<Vec<f64>>,
    model: ModelMeta,
}

#[derive(serde::Serialize, serde::Deserialize)]
struct ModelMeta {
    description: String,
    fiber_dim: usize,
    space: MetricMeasureSpace,
}

impl SelfAdjointOperator {
    pub fn to_json(&self) -> String {
        let identity = self.gram.iter().all(|g| (g - 1.0).abs() < 1e-15);
        let ip_weight =
            if identity { None } else { Some(self.gram.iter().map(|g| 1.0 / g).collect()) };
        let mut eigenbasis = Vec::with_capacity(self.dim * self.dim);
        for i in 0..self.dim {
            for j in 0..self.dim {
                let z = self.basis[(i, j)];
                eigenbasis.push([z.re, z.im]);
            }
        }
        let doc = OperatorJson {
            dim: self.dim,
            eigenvalues: self.eigenvalues.clone(),
            eigenbasis,
            ip_weight,
            model: ModelMeta {
                description: self.model.clone(),
                fiber_dim: self.fiber_dim,
                space: (*self.space).clone(),
            },
        };
        serde_json::to_string_pretty(&doc).expect("operator serialization cannot fail")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let doc: OperatorJson = serde_json::from_str(s)?;
        if doc.eigenbasis.len() != doc.dim * doc.dim {
            return Err(Error::Serde("eigenbasis entry count mismatch".into()));
        }
        let space = Arc::new(MetricMeasureSpace::new(
            (0..doc.model.space.n)
                .flat_map(|i| (0..doc.model.space.n).map(move |j| (i, j)))
                .map(|(i, j)| doc.model.space.dist(i, j))
                .collect(),
            doc.model.space.mass.clone(),
            doc.model.space.labels.clone(),
        )?);
        let basis = DMatrix::from_fn(doc.dim, doc.dim, |i, j| {
            let z = doc.eigenbasis[i * doc.dim + j];
            C64::new(z[0], z[1])
        });
        let gram = match doc.ip_weight {
            None => DVector::from_element(doc.dim, 1.0),
            Some(w) => {
                if w.len() != doc.dim {
                    return Err(Error::Serde("ip weight length mismatch".into()));
                }
                if w.iter().any(|x| !(*x > 0.0)) {
                    return Err(Error::Serde("ip weight must be positive".into()));
                }
                DVector::from_iterator(doc.dim, w.iter().map(|x| 1.0 / x))
            }
        };
        SelfAdjointOperator::from_spectral(
            space,
            doc.model.fiber_dim,
            doc.eigenvalues,
            basis,
            gram,
            doc.model.description,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn constant_section(dim: usize) -> Section {
        DVector::from_element(dim, C64::new(1.0, 0.0))
    }

    #[test]
    fn circle_n2_matches_difference_model_oracle() {
        // Oracle: the 2-point difference model (pi/2h)(I - Swap) has
        // eigenvalues {0, pi/h}; solve the 2x2 in closed form.
        let circumference = 2.0;
        let h = circumference / 2.0;
        let op = circle_derivative(2, circumference).unwrap();
        let oracle = [0.0, std::f64::consts::PI / h];
        assert!((op.eigenvalues[0] - oracle[0]).abs() < 1e-12);
        assert!((op.eigenvalues[1] - oracle[1]).abs() < 1e-12);
    }

    #[test]
    fn circle_constant_in_kernel() {
        let op = circle_derivative(8, std::f64::consts::TAU).unwrap();
        let u = constant_section(8);
        let du = op.apply(&u);
        assert!(du.norm() < 1e-12);
    }

    #[test]
    fn circle_spectrum_symmetric_below_nyquist() {
        let op = circle_derivative(8, std::f64::consts::TAU).unwrap();
        let nyq = op.lambda_max_abs();
        for l in &op.eigenvalues {
            if l.abs() < nyq - 1e-12 && l.abs() > 1e-12 {
                assert!(
                    op.eigenvalues.iter().any(|m| (m + l).abs() < 1e-12),
                    "unpaired eigenvalue {l}"
                );
            }
        }
    }

    #[test]
    fn circle_group_is_exact_translation() {
        // DFT diagonalization oracle: e^{ihD} must shift indices by one.
        let n = 8;
        let op = circle_derivative(n, std::f64::consts::TAU).unwrap();
        let h = std::f64::consts::TAU / n as f64;
        let u = random_section(n, 42);
        let v = op.group(h, &u);
        // e^{ihD} e^{ikx} = e^{ik(x+h)}, so the value at x_j becomes u(x_{j+1}).
        for j in 0..n {
            let shifted = u[(j + 1) % n];
            assert!((v[j] - shifted).norm() < 1e-12, "at {j}: {} vs {}", v[j], shifted);
        }
    }

    #[test]
    fn hodge_single_edge_eigenvalues() {
        // Oracle: 2x2 block [[0, w], [w, 0]] has eigenvalues {-w, w}.
        let w = 1.75;
        let op = hodge_dirac_graph(1, &[vec![w]], None).unwrap();
        assert!((op.eigenvalues[0] + w).abs() < 1e-12);
        assert!((op.eigenvalues[1] - w).abs() < 1e-12);
    }

    #[test]
    fn hodge_square_block_diagonal() {
        let incidence = vec![
            vec![-1.0, 1.0, 0.0, 0.0],
            vec![0.0, -1.0, 1.0, 0.0],
            vec![0.0, 0.0, -1.0, 1.0],
            vec![1.0, 0.0, 0.0, -1.0],
        ];
        let op = hodge_dirac_graph(4, &incidence, None).unwrap();
        let d2 = op.to_dense(|l| C64::new(l * l, 0.0));
        // off-diagonal blocks of D^2 vanish to machine precision
        let mut off: f64 = 0.0;
        for v in 0..4 {
            for e in 0..4 {
                off = off.max(d2[(v, 4 + e)].norm());
                off = off.max(d2[(4 + e, v)].norm());
            }
        }
        assert!(off < 1e-10 * op.lambda_max_abs().powi(2).max(1.0));
    }

    /// Gaussian-elimination rank oracle.
    fn rank_oracle(rows: &[Vec<f64>]) -> usize {
        let mut m: Vec<Vec<f64>> = rows.to_vec();
        let (nr, nc) = (m.len(), m[0].len());
        let mut rank = 0;
        for col in 0..nc {
            let piv = (rank..nr).max_by(|&a, &b| {
                m[a][col].abs().partial_cmp(&m[b][col].abs()).unwrap()
            });
            if let Some(p) = piv {
                if m[p][col].abs() < 1e-12 {
                    continue;
                }
                m.swap(rank, p);
                for r in 0..nr {
                    if r != rank && m[r][col].abs() > 0.0 {
                        let f = m[r][col] / m[rank][col];
                        for c in 0..nc {
                            m[r][c] -= f * m[rank][c];
                        }
                    }
                }
                rank += 1;
            }
        }
        rank
    }

    #[test]
    fn hodge_four_cycle_kernel_dim_two() {
        let incidence = vec![
            vec![-1.0, 1.0, 0.0, 0.0],
            vec![0.0, -1.0, 1.0, 0.0],
            vec![0.0, 0.0, -1.0, 1.0],
            vec![1.0, 0.0, 0.0, -1.0],
        ];
        let r = rank_oracle(&incidence);
        // kernel of D = (vertices - rank) + (edges - rank)
        let expected_kernel = (4 - r) + (4 - r);
        assert_eq!(expected_kernel, 2);
        let op = hodge_dirac_graph(4, &incidence, None).unwrap();
        let kdim = op.eigenvalues.iter().filter(|l| l.abs() < 1e-10).count();
        assert_eq!(kdim, 2);
    }

    #[test]
    fn divergence_identity_coefficient_eigenvalues() {
        // Closed-form circulant oracle: 4 sin^2(pi k / n) / h^2.
        let n = 16;
        let h = 1.0 / n as f64;
        let model = divergence_form_1d(n, &vec![1.0; n], 1.0).unwrap();
        let mut oracle: Vec<f64> = (0..n)
            .map(|k| {
                let s = (std::f64::consts::PI * k as f64 / n as f64).sin();
                4.0 * s * s / (h * h)
            })
            .collect();
        oracle.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (got, want) in model.l.eigenvalues.iter().zip(&oracle) {
            assert!((got - want).abs() < 1e-7 * want.max(1.0), "{got} vs {want}");
        }
    }

    #[test]
    fn divergence_constant_in_kernel() {
        let model = divergence_form_1d(12, &vec![3.0; 12], 1.0).unwrap();
        let u = constant_section(12);
        assert!(model.l.apply(&u).norm() < 1e-9 * model.l.lambda_max_abs());
    }

    #[test]
    fn divergence_rejects_ellipticity_violation() {
        assert!(divergence_form_1d(8, &vec![0.5; 8], 1.0).is_err());
        assert!(divergence_form_1d(8, &vec![1.0; 8], 0.0).is_err());
    }

    #[test]
    fn bd_square_is_block_diagonal() {
        let n = 32;
        let coeff: Vec<f64> = (0..n)
            .map(|i| 2.0 + (std::f64::consts::TAU * i as f64 / n as f64).sin())
            .collect();
        let model = divergence_form_1d(n, &coeff, 1.0).unwrap();
        assert!(bd_square_block_residual(&model) < 1e-13);
    }

    #[test]
    fn bd_self_adjoint_in_weighted_metric() {
        let n = 16;
        let coeff: Vec<f64> = (0..n).map(|i| 1.5 + 0.5 * ((i as f64).cos())).collect();
        let model = divergence_form_1d(n, &coeff, 1.0).unwrap();
        let op = &model.bd;
        for seed in 0..10u64 {
            let u = random_section(2 * n, seed);
            let v = random_section(2 * n, seed + 100);
            let lhs = op.ip(&op.apply(&u), &v);
            let rhs = op.ip(&u, &op.apply(&v));
            let scale = op.lambda_max_abs() * op.norm_w(&u) * op.norm_w(&v);
            assert!((lhs - rhs).norm() <= 1e-12 * scale.max(1e-300));
        }
    }

    #[test]
    fn spectral_identity_function() {
        let op = random_hermitian(10, 7).unwrap();
        let u = random_section(10, 3);
        let v = op.spectral_apply(|_| C64::new(1.0, 0.0), &u).unwrap();
        assert!((&v - &u).norm() < 1e-12 * u.norm());
    }

    #[test]
    fn spectral_square_matches_double_application() {
        let op = random_hermitian(12, 11).unwrap();
        let u = random_section(12, 5);
        let v1 = op.spectral_apply(|l| C64::new(l * l, 0.0), &u).unwrap();
        let v2 = op.apply(&op.apply(&u));
        assert!((&v1 - &v2).norm() <= 1e-12 * v2.norm().max(1.0));
    }

    #[test]
    fn spectral_indicator_is_kernel_projector() {
        let op = circle_derivative(8, std::f64::consts::TAU).unwrap();
        let u = random_section(8, 9);
        let tol = op.lambda_tol_default();
        let p0 = op
            .spectral_apply(
                |l| if l.abs() <= tol { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) },
                &u,
            )
            .unwrap();
        // kernel of -i d/dx on the circle = constants; projection = mean
        let mean: C64 = u.iter().sum::<C64>() / C64::new(8.0, 0.0);
        for j in 0..8 {
            assert!((p0[j] - mean).norm() < 1e-12);
        }
    }

    #[test]
    fn spectral_rejects_nonfinite() {
        let op = circle_derivative(4, std::f64::consts::TAU).unwrap();
        let u = constant_section(4);
        let err = op.spectral_apply(|l| C64::new(1.0 / l, 0.0), &u);
        match err {
            Err(Error::Evaluation { eigenvalue, .. }) => assert_eq!(eigenvalue, 0.0),
            other => panic!("expected evaluation error, got {other:?}"),
        }
    }

    #[test]
    fn range_projector_properties() {
        // invertible op -> identity
        let op = random_hermitian(8, 21).unwrap();
        let tol = op.lambda_tol_default();
        let u = random_section(8, 2);
        if op.eigenvalues.iter().all(|l| l.abs() > tol) {
            let pu = op.project_range(tol, &u);
            assert!((&pu - &u).norm() < 1e-12 * u.norm());
        }
        // zero operator -> zero map
        let space = Arc::new(build_circle(4, 4.0).unwrap());
        let zero = SelfAdjointOperator::from_matrix(
            space,
            1,
            &DMatrix::<C64>::zeros(4, 4),
            DVector::from_element(4, 1.0),
            "zero",
        )
        .unwrap();
        let u4 = random_section(4, 1);
        assert!(zero.project_range(zero.lambda_tol_default(), &u4).norm() < 1e-14);
        // circle n=8: rank n-1 (constants removed)
        let circ = circle_derivative(8, std::f64::consts::TAU).unwrap();
        assert_eq!(circ.range_rank(circ.lambda_tol_default()), 7);
        // projector is idempotent and self-adjoint
        let c = circle_derivative(6, std::f64::consts::TAU).unwrap();
        let u6 = random_section(6, 77);
        let v6 = random_section(6, 78);
        let tol6 = c.lambda_tol_default();
        let p1 = c.project_range(tol6, &u6);
        let p2 = c.project_range(tol6, &p1);
        assert!((&p1 - &p2).norm() < 1e-12 * p1.norm().max(1.0));
        let lhs = c.ip(&c.project_range(tol6, &u6), &v6);
        let rhs = c.ip(&u6, &c.project_range(tol6, &v6));
        assert!((lhs - rhs).norm() < 1e-12 * (c.norm_w(&u6) * c.norm_w(&v6)).max(1.0));
    }

    #[test]
    fn resolvent_zero_operator() {
        let space = Arc::new(build_circle(3, 3.0).unwrap());
        let zero = SelfAdjointOperator::from_matrix(
            space,
            1,
            &DMatrix::<C64>::zeros(3, 3),
            DVector::from_element(3, 1.0),
            "zero",
        )
        .unwrap();
        let u = constant_section(3);
        let r = zero.resolvent(C64::new(0.0, 1.0), &u).unwrap();
        for j in 0..3 {
            assert!((r[j] - u[j] / C64::new(0.0, 1.0)).norm() < 1e-14);
        }
    }

    #[test]
    fn resolvent_bound_and_forward_identity() {
        let op = random_hermitian(16, 5).unwrap();
        let u = random_section(16, 6);
        // z outside the bisector of angle pi/4 at |z| = |lambda_max|
        let z = C64::new(0.0, op.lambda_max_abs());
        let r = op.resolvent(z, &u).unwrap();
        // (H1) with C_theta = 1/sin(pi/4) = sqrt(2)
        let bound = 2.0f64.sqrt() / z.norm() * op.norm_w(&u);
        assert!(op.norm_w(&r) <= bound * (1.0 + 1e-12));
        // forward application restores u
        let forward = {
            let zu = r.clone() * z;
            &zu - &op.apply(&r)
        };
        assert!((&forward - &u).norm() <= 1e-12 * u.norm());
    }

    #[test]
    fn resolvent_near_singular_rejected() {
        let op = random_hermitian(6, 13).unwrap();
        let u = random_section(6, 1);
        let z = C64::new(op.eigenvalues[2], 0.0);
        assert!(matches!(op.resolvent(z, &u), Err(Error::NearSingular { .. })));
    }

    #[test]
    fn self_adjointness_residual_on_random_pairs() {
        let op = random_hermitian(20, 31).unwrap();
        let scale = op.lambda_max_abs();
        for seed in 0..100u64 {
            let u = random_section(20, 1000 + seed);
            let v = random_section(20, 2000 + seed);
            let lhs = op.ip(&op.apply(&u), &v);
            let rhs = op.ip(&u, &op.apply(&v));
            let tol = 1e-12 * scale * op.norm_w(&u) * op.norm_w(&v);
            assert!((lhs - rhs).norm() <= tol.max(1e-300));
        }
    }

    #[test]
    fn calculus_homomorphism_for_rational_functions() {
        let op = random_hermitian(24, 17).unwrap();
        let u = random_section(24, 8);
        let f = |l: f64| C64::new(l * l - 0.5, 0.3 * l);
        let g = |l: f64| C64::new(1.0, 0.0) / C64::new(l * l + 1.0, 0.5);
        let fg = op.spectral_apply(|l| f(l) * g(l), &u).unwrap();
        let comp = op.spectral_apply(f, &op.spectral_apply(g, &u).unwrap()).unwrap();
        assert!((&fg - &comp).norm() <= 1e-10 * u.norm());
    }

    #[test]
    fn resolvent_identity() {
        let op = random_hermitian(18, 23).unwrap();
        let u = random_section(18, 4);
        let z1 = C64::new(0.3, 2.0);
        let z2 = C64::new(-1.0, 1.5);
        let lhs = &op.resolvent(z1, &u).unwrap() - &op.resolvent(z2, &u).unwrap();
        let rhs = op.resolvent(z1, &op.resolvent(z2, &u).unwrap()).unwrap() * (z2 - z1);
        assert!((&lhs - &rhs).norm() <= 1e-10 * u.norm());
    }

    #[test]
    fn masked_norm_zero_when_function_vanishes() {
        let op = circle_derivative(8, 8.0).unwrap();
        let norm = op.masked_norm(|_| C64::new(0.0, 0.0), &[0, 1], &[4, 5]);
        assert_eq!(norm, 0.0);
        // Identity masked by disjoint sets vanishes.
        let id = op.masked_norm(|_| C64::new(1.0, 0.0), &[0, 1], &[4, 5]);
        assert!(id < 1e-12);
    }

    #[test]
    fn masked_norm_matches_dense_svd_oracle() {
        // Oracle: largest singular value by bidiagonal-free eigen of B^H B.
        let op = random_hermitian(12, 3).unwrap();
        let f = |l: f64| C64::new((-(l * l)).exp(), 0.0);
        let e: Vec<usize> = (0..5).collect();
        let fset: Vec<usize> = (6..12).collect();
        let fast = op.masked_norm(f, &e, &fset);
        let m = op.to_dense(f);
        let mut block = DMatrix::<C64>::zeros(5, 6);
        for (bi, &i) in e.iter().enumerate() {
            for (bj, &j) in fset.iter().enumerate() {
                block[(bi, bj)] = m[(i, j)];
            }
        }
        let h = block.adjoint() * &block;
        let oracle = h.symmetric_eigen().eigenvalues.iter().fold(0.0f64, |a, b| a.max(*b)).sqrt();
        assert!((fast - oracle).abs() <= 1e-9 * oracle.max(1e-12));
    }

    #[test]
    fn json_roundtrip() {
        let n = 12;
        let coeff: Vec<f64> = (0..n).map(|i| 2.0 + 0.3 * (i as f64).sin()).collect();
        let model = divergence_form_1d(n, &coeff, 1.0).unwrap();
        let j = model.bd.to_json();
        let op2 = SelfAdjointOperator::from_json(&j).unwrap();
        assert_eq!(op2.dim, 2 * n);
        assert_eq!(op2.fiber_dim, 2);
        let u = random_section(2 * n, 50);
        let v1 = model.bd.apply(&u);
        let v2 = op2.apply(&u);
        assert!((&v1 - &v2).norm() <= 1e-9 * v1.norm().max(1.0));
    }
}
