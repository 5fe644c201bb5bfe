//! Single-chart K-contact sub-Riemannian manifolds.
//!
//! A chart lives on a domain of `R^n`, `n = 2m + 1`, with the last coordinate
//! `t` playing the role of the Reeb direction for all built-ins. Coefficient
//! functions are generic over [`Scalar`] so the same code path serves plain
//! evaluation and forward differentiation.
//!
//! Conventions used throughout the crate:
//! * `dθ(X, Y) = Xθ(Y) − Yθ(X) − θ([X, Y])` (no factor 1/2);
//! * frame matrices have one column per horizontal field `e_a`;
//! * endomorphisms act on column vectors of frame components.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::ad::{self, Dual, Scalar};
use crate::error::{Error, Result};
use crate::linalg;

/// Width (in `|z|^2` units) of the Gaussian bump used by `perturbed_disc`.
pub const BUMP_WIDTH: f64 = 0.25;
/// Radius of the coordinate ball each disc/ball factor is clipped to.
pub const FACTOR_RADIUS: f64 = 0.9;
/// Half-width of the coordinate box for the `t` coordinate (and for the
/// Heisenberg chart as a whole).
pub const BOX_HALF_WIDTH: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FactorKind {
    PoincareDisc,
    BergmanBall,
    PerturbedDisc,
}

impl FactorKind {
    pub fn name(&self) -> &'static str {
        match self {
            FactorKind::PoincareDisc => "poincare_disc",
            FactorKind::BergmanBall => "bergman_ball",
            FactorKind::PerturbedDisc => "perturbed_disc",
        }
    }
}

fn default_complex_dim() -> usize {
    1
}

fn default_curvature() -> f64 {
    1.0
}

/// One Kähler factor `M_i` of the product construction together with its
/// coefficient `b_i` in `θ = dt + Σ b_i θ^i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorSpec {
    pub kind: FactorKind,
    #[serde(default = "default_complex_dim")]
    pub complex_dim: usize,
    pub b: f64,
    /// Metric scale: the factor metric is divided by this number.
    #[serde(default = "default_curvature")]
    pub curvature: f64,
    /// Amplitude of the conformal perturbation (`perturbed_disc` only).
    #[serde(default)]
    pub epsilon: f64,
}

impl FactorSpec {
    pub fn poincare_disc(b: f64) -> Self {
        FactorSpec { kind: FactorKind::PoincareDisc, complex_dim: 1, b, curvature: 1.0, epsilon: 0.0 }
    }

    pub fn bergman_ball(complex_dim: usize, b: f64) -> Self {
        FactorSpec { kind: FactorKind::BergmanBall, complex_dim, b, curvature: 1.0, epsilon: 0.0 }
    }

    pub fn perturbed_disc(b: f64, epsilon: f64) -> Self {
        FactorSpec { kind: FactorKind::PerturbedDisc, complex_dim: 1, b, curvature: 1.0, epsilon }
    }

    pub fn real_dim(&self) -> usize {
        2 * self.complex_dim
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.b.is_finite() && self.b != 0.0) {
            return Err(Error::InvalidConfig(format!("factor coefficient b must be a nonzero real, got {}", self.b)));
        }
        if !(self.curvature.is_finite() && self.curvature > 0.0) {
            return Err(Error::InvalidConfig(format!("curvature scale must be positive, got {}", self.curvature)));
        }
        if self.complex_dim == 0 {
            return Err(Error::InvalidConfig("complex_dim must be positive".into()));
        }
        if !self.epsilon.is_finite() {
            return Err(Error::InvalidConfig("epsilon must be finite".into()));
        }
        match self.kind {
            FactorKind::PoincareDisc | FactorKind::PerturbedDisc if self.complex_dim != 1 => Err(
                Error::InvalidConfig(format!("{} factors have complex_dim 1", self.kind.name())),
            ),
            _ => Ok(()),
        }
    }

    /// Factor metric in the local real coordinates `(x_1, y_1, x_2, y_2, ...)`.
    pub fn metric<S: Scalar>(&self, w: &[S]) -> DMatrix<S> {
        let k = self.complex_dim;
        let s = w.iter().fold(S::zero(), |acc, &v| acc + v * v);
        let one_minus = S::one() - s;
        match self.kind {
            FactorKind::PoincareDisc | FactorKind::PerturbedDisc => {
                let mut conf = S::from_f64(4.0 / self.curvature) / (one_minus * one_minus);
                if self.kind == FactorKind::PerturbedDisc {
                    let bump = (-s.scale(1.0 / BUMP_WIDTH)).exp();
                    conf *= (bump.scale(self.epsilon)).exp();
                }
                DMatrix::from_diagonal_element(2, 2, conf)
            }
            FactorKind::BergmanBall => {
                // h_{jk} = δ_{jk}/(1-s) + conj(z_j) z_k/(1-s)^2 = P + iQ, and the real
                // metric Re(u^T h conj(v)) has pair blocks [[P, Q], [-Q, P]].
                let inv1 = one_minus.recip().scale(1.0 / self.curvature);
                let inv2 = (one_minus * one_minus).recip().scale(1.0 / self.curvature);
                let mut g = DMatrix::zeros(2 * k, 2 * k);
                for j in 0..k {
                    let (xj, yj) = (w[2 * j], w[2 * j + 1]);
                    for l in 0..k {
                        let (xl, yl) = (w[2 * l], w[2 * l + 1]);
                        let mut p = (xj * xl + yj * yl) * inv2;
                        if j == l {
                            p += inv1;
                        }
                        let q = (xj * yl - yj * xl) * inv2;
                        g[(2 * j, 2 * l)] = p;
                        g[(2 * j + 1, 2 * l + 1)] = p;
                        g[(2 * j, 2 * l + 1)] = q;
                        g[(2 * j + 1, 2 * l)] = -q;
                    }
                }
                g
            }
        }
    }

    /// Primitive `θ^i` of the factor's Ricci form: `θ^i = κ (x dy − y dx)·(−1)/(1−s)`
    /// summed over complex coordinates, with `κ = complex_dim + 1`.
    pub fn ricci_primitive<S: Scalar>(&self, w: &[S]) -> Vec<S> {
        let s = w.iter().fold(S::zero(), |acc, &v| acc + v * v);
        let coef = (S::one() - s).recip().scale((self.complex_dim + 1) as f64);
        let mut out = vec![S::zero(); w.len()];
        for j in 0..self.complex_dim {
            out[2 * j] = w[2 * j + 1] * coef;
            out[2 * j + 1] = -(w[2 * j] * coef);
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Model {
    Heisenberg,
    Product { factors: Vec<FactorSpec>, offsets: Vec<usize> },
}

/// Coordinate box intersected with round balls on coordinate blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct Domain {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// `(offset, len, radius)`: `|x[offset..offset+len]| <= radius`.
    pub balls: Vec<(usize, usize, f64)>,
}

impl Domain {
    pub fn contains(&self, x: &[f64]) -> bool {
        if x.len() != self.lower.len() || x.iter().any(|v| !v.is_finite()) {
            return false;
        }
        let in_box = x.iter().zip(self.lower.iter().zip(&self.upper)).all(|(v, (lo, hi))| lo <= v && v <= hi);
        in_box
            && self
                .balls
                .iter()
                .all(|&(o, l, r)| x[o..o + l].iter().map(|v| v * v).sum::<f64>() <= r * r)
    }

    /// Uniform sample in the domain (rejection on the balls).
    pub fn sample<R: Rng>(&self, rng: &mut R) -> DVector<f64> {
        loop {
            let x: Vec<f64> =
                self.lower.iter().zip(&self.upper).map(|(&lo, &hi)| lo + (hi - lo) * rng.random::<f64>()).collect();
            if self.contains(&x) {
                return DVector::from_vec(x);
            }
        }
    }
}

/// A K-contact sub-Riemannian manifold described in one chart.
#[derive(Debug, Clone, PartialEq)]
pub struct ContactChart {
    m: usize,
    model: Model,
    domain: Domain,
    twist: f64,
}

/// Plain evaluation of the chart data at a point.
#[derive(Debug, Clone)]
pub struct ContactEval {
    pub theta: DVector<f64>,
    pub xi: DVector<f64>,
    pub frame: DMatrix<f64>,
    pub metric: DMatrix<f64>,
}

/// Flat model: `θ = dt − Σ y_i dx_i` on `R^{2m+1}` with the orthonormal frame
/// `e_{x_i} = ∂_{x_i} + y_i ∂_t`, `e_{y_i} = ∂_{y_i}`.
pub fn heisenberg(m: usize) -> Result<ContactChart> {
    if m < 2 {
        return Err(Error::InvalidConfig(format!("need m >= 2 (dim >= 5), got m = {m}")));
    }
    let n = 2 * m + 1;
    Ok(ContactChart {
        m,
        model: Model::Heisenberg,
        domain: Domain { lower: vec![-BOX_HALF_WIDTH; n], upper: vec![BOX_HALF_WIDTH; n], balls: vec![] },
        twist: 0.0,
    })
}

/// `R × M_1 × ... × M_r` with `θ = dt + Σ b_i θ^i`, `dθ^i = ρ^i`.
pub fn product_construction(factors: &[FactorSpec]) -> Result<ContactChart> {
    if factors.is_empty() {
        return Err(Error::InvalidConfig("factor list is empty".into()));
    }
    for f in factors {
        f.validate()?;
    }
    let m: usize = factors.iter().map(|f| f.complex_dim).sum();
    if m < 2 {
        return Err(Error::InvalidConfig(format!("total complex dimension must be >= 2, got {m}")));
    }
    let n = 2 * m + 1;
    let mut offsets = Vec::with_capacity(factors.len());
    let mut balls = Vec::with_capacity(factors.len());
    let mut off = 0;
    for f in factors {
        offsets.push(off);
        balls.push((off, f.real_dim(), FACTOR_RADIUS));
        off += f.real_dim();
    }
    let mut lower = vec![-FACTOR_RADIUS; n];
    let mut upper = vec![FACTOR_RADIUS; n];
    lower[n - 1] = -BOX_HALF_WIDTH;
    upper[n - 1] = BOX_HALF_WIDTH;
    Ok(ContactChart {
        m,
        model: Model::Product { factors: factors.to_vec(), offsets },
        domain: Domain { lower, upper, balls },
        twist: 0.0,
    })
}

impl ContactChart {
    /// Same manifold, but with the horizontal frame replaced by `E·A(x)`,
    /// `A = I + amplitude·S(x)` for a bounded `S` that depends on every
    /// coordinate including `t`. The geometry is unchanged; the frame is no
    /// longer holonomic nor Reeb-invariant, which exercises every
    /// structure-function term.
    pub fn with_frame_twist(mut self, amplitude: f64) -> Self {
        self.twist = amplitude;
        self
    }

    pub fn twist(&self) -> f64 {
        self.twist
    }

    fn twist_matrix<S: Scalar>(&self, x: &DVector<S>) -> Option<DMatrix<S>> {
        if self.twist == 0.0 {
            return None;
        }
        let n = self.dim();
        let r = self.rank();
        let q = x.iter().fold(S::one(), |acc, &v| acc + v * v).recip();
        Some(DMatrix::from_fn(r, r, |a, b| {
            let lin = x[(a + 2 * b + 1) % n] + x[n - 1].scale(0.3 * (a as f64 - b as f64));
            let base = if a == b { S::one() } else { S::zero() };
            base + (lin * q).scale(self.twist)
        }))
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// Manifold dimension `2m + 1`.
    pub fn dim(&self) -> usize {
        2 * self.m + 1
    }

    pub fn rank(&self) -> usize {
        2 * self.m
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn factors(&self) -> &[FactorSpec] {
        match &self.model {
            Model::Heisenberg => &[],
            Model::Product { factors, .. } => factors,
        }
    }

    /// Frame index ranges of the product factors (empty for Heisenberg).
    pub fn factor_blocks(&self) -> Vec<std::ops::Range<usize>> {
        match &self.model {
            Model::Heisenberg => vec![],
            Model::Product { factors, offsets } => {
                factors.iter().zip(offsets).map(|(f, &o)| o..o + f.real_dim()).collect()
            }
        }
    }

    pub fn name(&self) -> String {
        match &self.model {
            Model::Heisenberg if self.twist != 0.0 => format!("heisenberg({}, twist {})", self.m, self.twist),
            Model::Heisenberg => format!("heisenberg({})", self.m),
            Model::Product { factors, .. } => {
                let parts: Vec<String> = factors
                    .iter()
                    .map(|f| format!("{}[k={},b={},eps={}]", f.kind.name(), f.complex_dim, f.b, f.epsilon))
                    .collect();
                if self.twist != 0.0 {
                    format!("product({}, twist {})", parts.join(" x "), self.twist)
                } else {
                    format!("product({})", parts.join(" x "))
                }
            }
        }
    }

    /// Base point used by default: the origin.
    pub fn origin(&self) -> DVector<f64> {
        DVector::zeros(self.dim())
    }

    pub fn contains(&self, x: &DVector<f64>) -> bool {
        self.domain.contains(x.as_slice())
    }

    pub fn check_domain(&self, x: &DVector<f64>) -> Result<()> {
        if self.contains(x) {
            Ok(())
        } else {
            Err(Error::OutsideDomain { point: x.iter().cloned().collect() })
        }
    }

    /// Components of the contact form.
    pub fn theta<S: Scalar>(&self, x: &DVector<S>) -> DVector<S> {
        let n = self.dim();
        let mut th = DVector::zeros(n);
        th[n - 1] = S::one();
        match &self.model {
            Model::Heisenberg => {
                for i in 0..self.m {
                    th[2 * i] = -x[2 * i + 1];
                }
            }
            Model::Product { factors, offsets } => {
                for (f, &o) in factors.iter().zip(offsets) {
                    let w = &x.as_slice()[o..o + f.real_dim()];
                    for (j, v) in f.ricci_primitive(w).into_iter().enumerate() {
                        th[o + j] = v.scale(f.b);
                    }
                }
            }
        }
        th
    }

    /// Reeb field; `∂_t` for every built-in.
    pub fn xi<S: Scalar>(&self, _x: &DVector<S>) -> DVector<S> {
        let n = self.dim();
        let mut v = DVector::zeros(n);
        v[n - 1] = S::one();
        v
    }

    /// Horizontal frame `e_a = ∂_a − θ_a ∂_t`, `a < 2m`.
    pub fn frame<S: Scalar>(&self, x: &DVector<S>) -> DMatrix<S> {
        let n = self.dim();
        let th = self.theta(x);
        let mut e = DMatrix::zeros(n, 2 * self.m);
        for a in 0..2 * self.m {
            e[(a, a)] = S::one();
            e[(n - 1, a)] = -th[a];
        }
        match self.twist_matrix(x) {
            Some(t) => e * t,
            None => e,
        }
    }

    /// Metric `g(e_a, e_b)`.
    pub fn metric<S: Scalar>(&self, x: &DVector<S>) -> DMatrix<S> {
        let g = self.coordinate_metric(x);
        match self.twist_matrix(x) {
            Some(t) => t.transpose() * g * t,
            None => g,
        }
    }

    fn coordinate_metric<S: Scalar>(&self, x: &DVector<S>) -> DMatrix<S> {
        let r = 2 * self.m;
        match &self.model {
            Model::Heisenberg => DMatrix::identity(r, r),
            Model::Product { factors, offsets } => {
                let mut g = DMatrix::zeros(r, r);
                for (f, &o) in factors.iter().zip(offsets) {
                    let d = f.real_dim();
                    let gi = f.metric(&x.as_slice()[o..o + d]);
                    g.view_mut((o, o), (d, d)).copy_from(&gi);
                }
                g
            }
        }
    }

    pub fn random_points(&self, count: usize, seed: u64) -> Vec<DVector<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..count).map(|_| self.domain.sample(&mut rng)).collect()
    }
}

/// Evaluate `(θ, ξ, E, G)` at `x`, rejecting points outside the domain and
/// non-SPD metrics.
pub fn eval_contact(chart: &ContactChart, x: &DVector<f64>) -> Result<ContactEval> {
    chart.check_domain(x)?;
    let metric = chart.metric(x);
    if linalg::cholesky(&metric).is_none() {
        return Err(Error::NotPositiveDefinite { point: x.iter().cloned().collect() });
    }
    Ok(ContactEval { theta: chart.theta(x), xi: chart.xi(x), frame: chart.frame(x), metric })
}

/// Values plus all first coordinate partials of the chart data.
#[derive(Debug, Clone)]
pub struct ChartJet<S: Scalar> {
    pub theta: DVector<S>,
    pub xi: DVector<S>,
    pub frame: DMatrix<S>,
    pub metric: DMatrix<S>,
    /// `d_theta[i] = ∂_i θ`, and likewise for the other fields.
    pub d_theta: Vec<DVector<S>>,
    pub d_xi: Vec<DVector<S>>,
    pub d_frame: Vec<DMatrix<S>>,
    pub d_metric: Vec<DMatrix<S>>,
}

pub fn chart_jet<S: Scalar>(chart: &ContactChart, x: &DVector<S>) -> ChartJet<S> {
    let n = chart.dim();
    let mut d_theta = Vec::with_capacity(n);
    let mut d_xi = Vec::with_capacity(n);
    let mut d_frame = Vec::with_capacity(n);
    let mut d_metric = Vec::with_capacity(n);
    let mut values = None;
    for i in 0..n {
        let mut dir = DVector::zeros(n);
        dir[i] = S::one();
        let xd: DVector<Dual<S>> = ad::seed(x, &dir);
        let (tv, td) = ad::vec_parts(&chart.theta(&xd));
        let (xv, xdv) = ad::vec_parts(&chart.xi(&xd));
        let (ev, ed) = ad::mat_parts(&chart.frame(&xd));
        let (gv, gd) = ad::mat_parts(&chart.metric(&xd));
        d_theta.push(td);
        d_xi.push(xdv);
        d_frame.push(ed);
        d_metric.push(gd);
        if values.is_none() {
            values = Some((tv, xv, ev, gv));
        }
    }
    let (theta, xi, frame, metric) = values.expect("chart dimension is positive");
    ChartJet { theta, xi, frame, metric, d_theta, d_xi, d_frame, d_metric }
}

/// Structure functions of the frame at a point:
/// `[e_a, e_b] = c^k_{ab} e_k + τ_{ab} ξ` and `[ξ, e_a] = d^b_a e_b + (θ-part) ξ`.
#[derive(Debug, Clone)]
pub struct StructureFunctions<S: Scalar> {
    /// `c[k][(a, b)] = c^k_{ab}`.
    pub c: Vec<DMatrix<S>>,
    /// `tau[(a, b)] = θ([e_a, e_b])`.
    pub tau: DMatrix<S>,
    /// `d[(b, a)] = d^b_a`, i.e. the matrix of `X ↦ [ξ, X]_D` on frame components.
    pub d: DMatrix<S>,
    /// `θ([ξ, e_a])`, zero for a genuine Reeb field.
    pub xi_theta: DVector<S>,
}

/// Everything first-order at a point, expressed in the horizontal frame.
#[derive(Debug, Clone)]
pub struct PointGeometry<S: Scalar> {
    pub jet: ChartJet<S>,
    pub g: DMatrix<S>,
    pub g_inv: DMatrix<S>,
    /// `ω_{ab} = dθ(e_a, e_b)` computed from the coordinate exterior derivative.
    pub omega: DMatrix<S>,
    /// Coordinate components `(dθ)_{ij} = ∂_iθ_j − ∂_jθ_i`.
    pub dtheta_coord: DMatrix<S>,
    pub sf: StructureFunctions<S>,
    /// `dg[a] = e_a(G)`.
    pub dg: Vec<DMatrix<S>>,
    /// `ξ(G)`.
    pub xi_g: DMatrix<S>,
    /// Inverse of `[E | ξ]`: rows give frame components and `θ`.
    pub split: DMatrix<S>,
}

fn directional<S: Scalar, T: Clone + std::ops::AddAssign + std::ops::Mul<S, Output = T>>(
    parts: &[T],
    dir: impl Iterator<Item = S>,
    zero: T,
) -> T {
    let mut acc = zero;
    for (p, c) in parts.iter().zip(dir) {
        acc += p.clone() * c;
    }
    acc
}

/// Lie bracket of two coordinate vector fields given their values and partials.
fn lie_bracket<S: Scalar>(
    xv: &DVector<S>,
    dx: &[DVector<S>],
    yv: &DVector<S>,
    dy: &[DVector<S>],
) -> DVector<S> {
    let n = xv.len();
    let zero = DVector::zeros(n);
    let x_of_y = directional(dy, xv.iter().copied(), zero.clone());
    let y_of_x = directional(dx, yv.iter().copied(), zero);
    x_of_y - y_of_x
}

pub fn point_geometry<S: Scalar>(chart: &ContactChart, x: &DVector<S>) -> Result<PointGeometry<S>> {
    let jet = chart_jet(chart, x);
    let n = chart.dim();
    let r = chart.rank();
    let g = jet.metric.clone();
    let g_inv = linalg::inverse(&g).ok_or_else(|| Error::NotPositiveDefinite {
        point: x.iter().map(|v| v.re()).collect(),
    })?;

    let dtheta_coord = DMatrix::from_fn(n, n, |i, j| jet.d_theta[i][j] - jet.d_theta[j][i]);
    let omega = jet.frame.transpose() * &dtheta_coord * &jet.frame;

    let mut f = DMatrix::zeros(n, n);
    f.view_mut((0, 0), (n, r)).copy_from(&jet.frame);
    f.column_mut(r).copy_from(&jet.xi);
    let split = linalg::inverse(&f).ok_or_else(|| Error::Degenerate("frame and Reeb field are not a basis".into()))?;

    let frame_col = |a: usize| -> DVector<S> { jet.frame.column(a).into_owned() };
    let frame_partials =
        |a: usize| -> Vec<DVector<S>> { jet.d_frame.iter().map(|m| m.column(a).into_owned()).collect() };
    let cols: Vec<DVector<S>> = (0..r).map(frame_col).collect();
    let partials: Vec<Vec<DVector<S>>> = (0..r).map(frame_partials).collect();

    let mut c = vec![DMatrix::zeros(r, r); r];
    let mut tau = DMatrix::zeros(r, r);
    for a in 0..r {
        for b in (a + 1)..r {
            let br = lie_bracket(&cols[a], &partials[a], &cols[b], &partials[b]);
            let comps = &split * br;
            for (k, ck) in c.iter_mut().enumerate() {
                ck[(a, b)] = comps[k];
                ck[(b, a)] = -comps[k];
            }
            tau[(a, b)] = comps[r];
            tau[(b, a)] = -comps[r];
        }
    }
    let mut d = DMatrix::zeros(r, r);
    let mut xi_theta = DVector::zeros(r);
    for a in 0..r {
        let br = lie_bracket(&jet.xi, &jet.d_xi, &cols[a], &partials[a]);
        let comps = &split * br;
        for b in 0..r {
            d[(b, a)] = comps[b];
        }
        xi_theta[a] = comps[r];
    }

    let zero_rr = DMatrix::zeros(r, r);
    let dg: Vec<DMatrix<S>> =
        (0..r).map(|a| directional(&jet.d_metric, jet.frame.column(a).iter().copied(), zero_rr.clone())).collect();
    let xi_g = directional(&jet.d_metric, jet.xi.iter().copied(), zero_rr);

    Ok(PointGeometry { g, g_inv, omega, dtheta_coord, sf: StructureFunctions { c, tau, d, xi_theta }, dg, xi_g, split, jet })
}

/// `ω_{ab} = dθ(e_a, e_b)`; fails when `ω` is degenerate.
pub fn d_theta_frame(chart: &ContactChart, x: &DVector<f64>) -> Result<DMatrix<f64>> {
    chart.check_domain(x)?;
    let geo = point_geometry(chart, x)?;
    let det = geo.omega.determinant();
    if !(det.abs() > 1e-300) {
        return Err(Error::Degenerate(format!("dθ is degenerate on D at {:?}", x.as_slice())));
    }
    Ok(geo.omega)
}

pub fn structure_functions(chart: &ContactChart, x: &DVector<f64>) -> Result<StructureFunctions<f64>> {
    chart.check_domain(x)?;
    Ok(point_geometry(chart, x)?.sf)
}

/// Maximum residuals of the chart invariants at one point.
#[derive(Debug, Clone, Default, Serialize)]
pub struct ChartResiduals {
    pub reeb_normalization: f64,
    pub frame_horizontal: f64,
    pub metric_min_eigenvalue: f64,
    pub reeb_contraction: f64,
    pub omega_abs_det: f64,
    pub k_contact: f64,
    pub tau_plus_omega: f64,
    pub xi_bracket_vertical: f64,
}

pub fn chart_residuals(chart: &ContactChart, x: &DVector<f64>) -> Result<ChartResiduals> {
    let ev = eval_contact(chart, x)?;
    let geo = point_geometry(chart, x)?;
    let (eigs, _) = linalg::sorted_symmetric_eigen(&ev.metric);
    let contraction = geo.dtheta_coord.transpose() * &ev.xi;
    let reeb_contraction = (ev.frame.transpose() * contraction).amax();
    let lie_g = &geo.xi_g - geo.sf.d.transpose() * &geo.g - &geo.g * &geo.sf.d;
    Ok(ChartResiduals {
        reeb_normalization: (ev.theta.dot(&ev.xi) - 1.0).abs(),
        frame_horizontal: (ev.frame.transpose() * &ev.theta).amax(),
        metric_min_eigenvalue: eigs[0],
        reeb_contraction,
        omega_abs_det: geo.omega.determinant().abs(),
        k_contact: lie_g.amax(),
        tau_plus_omega: (&geo.sf.tau + &geo.omega).amax(),
        xi_bracket_vertical: geo.sf.xi_theta.amax(),
    })
}

/// Standard complex structure `J e_{x_j} = e_{y_j}` on `r = 2k` pair coordinates.
pub fn standard_complex_structure(r: usize) -> DMatrix<f64> {
    let mut j = DMatrix::zeros(r, r);
    for p in 0..r / 2 {
        j[(2 * p + 1, 2 * p)] = 1.0;
        j[(2 * p, 2 * p + 1)] = -1.0;
    }
    j
}

#[cfg(test)]
mod tests {
    use super::*;

    fn disc_pair(b1: f64, b2: f64) -> ContactChart {
        product_construction(&[FactorSpec::poincare_disc(b1), FactorSpec::poincare_disc(b2)]).unwrap()
    }

    #[test]
    fn heisenberg_at_origin() {
        let ch = heisenberg(2).unwrap();
        let ev = eval_contact(&ch, &ch.origin()).unwrap();
        let mut dt = DVector::zeros(5);
        dt[4] = 1.0;
        assert_eq!(ev.theta, dt);
        assert_eq!(ev.xi, dt);
        assert_eq!(ev.metric, DMatrix::identity(4, 4));
    }

    #[test]
    fn heisenberg_omega_is_standard_symplectic_everywhere() {
        let ch = heisenberg(2).unwrap();
        let expected = -standard_complex_structure(4);
        for x in ch.random_points(10, 3) {
            let w = d_theta_frame(&ch, &x).unwrap();
            assert!((w - &expected).amax() < 1e-14);
        }
    }

    #[test]
    fn heisenberg_structure_functions() {
        let ch = heisenberg(2).unwrap();
        for x in ch.random_points(5, 9) {
            let geo = point_geometry(&ch, &x).unwrap();
            assert!(geo.sf.c.iter().all(|m| m.amax() < 1e-14));
            assert!((&geo.sf.tau + &geo.omega).amax() < 1e-14);
        }
    }

    #[test]
    fn product_at_origin_has_dt() {
        let ch = disc_pair(1.0, 1.0);
        assert_eq!(ch.dim(), 5);
        assert_eq!(ch.factors().len(), 2);
        let ev = eval_contact(&ch, &ch.origin()).unwrap();
        assert!((ev.theta[4] - 1.0).abs() < 1e-15);
        assert!(ev.theta.rows(0, 4).amax() < 1e-15);
    }

    #[test]
    fn product_omega_and_c_are_block_local() {
        let ch = disc_pair(1.0, 2.0);
        for x in ch.random_points(10, 4) {
            let geo = point_geometry(&ch, &x).unwrap();
            for a in 0..2 {
                for b in 2..4 {
                    assert!(geo.omega[(a, b)].abs() < 1e-12);
                    for k in 0..4 {
                        assert!(geo.sf.c[k][(a, b)].abs() < 1e-12);
                    }
                }
            }
            // c antisymmetry
            for k in 0..4 {
                assert!((&geo.sf.c[k] + geo.sf.c[k].transpose()).amax() < 1e-14);
            }
        }
    }

    #[test]
    fn invariants_hold_on_builtins() {
        let charts = vec![
            heisenberg(2).unwrap(),
            heisenberg(3).unwrap(),
            disc_pair(1.0, 2.0),
            product_construction(&[FactorSpec::bergman_ball(2, 1.0)]).unwrap(),
            product_construction(&[FactorSpec::perturbed_disc(1.0, 0.3), FactorSpec::poincare_disc(1.0)]).unwrap(),
            heisenberg(2).unwrap().with_frame_twist(0.1),
            disc_pair(1.0, 2.0).with_frame_twist(0.1),
        ];
        for ch in &charts {
            for x in ch.random_points(100, 17) {
                let r = chart_residuals(ch, &x).unwrap();
                assert!(r.reeb_normalization < 1e-10, "{}", ch.name());
                assert!(r.frame_horizontal < 1e-10);
                assert!(r.metric_min_eigenvalue > 0.0);
                assert!(r.reeb_contraction < 1e-8);
                assert!(r.omega_abs_det > 1e-8);
                assert!(r.k_contact < 1e-7);
                assert!(r.tau_plus_omega < 1e-7);
                assert!(r.xi_bracket_vertical < 1e-7);
            }
        }
    }

    #[test]
    fn twisted_frame_has_nonzero_structure_functions() {
        let ch = heisenberg(2).unwrap().with_frame_twist(0.1);
        let x = ch.random_points(1, 3).remove(0);
        let geo = point_geometry(&ch, &x).unwrap();
        assert!(geo.sf.c.iter().any(|m| m.amax() > 1e-3));
        assert!(geo.sf.d.amax() > 1e-3);
    }

    #[test]
    fn rejects_bad_constructions() {
        assert!(heisenberg(1).is_err());
        assert!(product_construction(&[]).is_err());
        assert!(product_construction(&[FactorSpec::poincare_disc(0.0), FactorSpec::poincare_disc(1.0)]).is_err());
        assert!(product_construction(&[FactorSpec::poincare_disc(1.0)]).is_err());
        let mut bad = FactorSpec::poincare_disc(1.0);
        bad.complex_dim = 2;
        assert!(product_construction(&[bad]).is_err());
    }

    #[test]
    fn outside_domain_is_an_error() {
        let ch = disc_pair(1.0, 1.0);
        let mut x = ch.origin();
        x[0] = 0.95;
        assert!(matches!(eval_contact(&ch, &x), Err(Error::OutsideDomain { .. })));
    }

    #[test]
    fn jet_matches_central_differences() {
        let ch = product_construction(&[FactorSpec::bergman_ball(2, 1.5)]).unwrap();
        let h = 1e-5;
        for x in ch.random_points(5, 21) {
            let jet = chart_jet(&ch, &x);
            for i in 0..ch.dim() {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[i] += h;
                xm[i] -= h;
                let fd_g = (ch.metric(&xp) - ch.metric(&xm)) / (2.0 * h);
                let fd_e = (ch.frame(&xp) - ch.frame(&xm)) / (2.0 * h);
                let scale_g = jet.d_metric[i].amax().max(1.0);
                let scale_e = jet.d_frame[i].amax().max(1.0);
                assert!((fd_g - &jet.d_metric[i]).amax() / scale_g < 1e-5);
                assert!((fd_e - &jet.d_frame[i]).amax() / scale_e < 1e-5);
            }
        }
    }
}
