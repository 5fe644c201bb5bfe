//! Curves, parallel transport and the Reeb flow.
//!
//! Curves are stored on a uniform grid of spacing `h/2` so that a classical
//! RK4 step of size `h` for the transport equation finds its three stages
//! (start, midpoint, end) among the samples. Velocities are stored per step
//! because piecewise-constant controls make them jump at segment boundaries.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ad::{self, Dual, Scalar};
use crate::connection::{schouten_at, second_order_at, wagner_n_from};
use crate::error::{Error, Result};
use crate::linalg::{self, OrthoFrame};
use crate::manifold::ContactChart;

/// Piecewise-constant controls `(u, v)` on `K` equal segments: the curve solves
/// `ẋ = Σ u^a e_a(x) + v ξ(x)`. Horizontal paths have `v ≡ 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlPath {
    pub x0: DVector<f64>,
    pub controls: Vec<DVector<f64>>,
    pub vertical: Vec<f64>,
    pub segment_duration: f64,
    pub steps_per_segment: usize,
}

impl ControlPath {
    /// Horizontal path on `[0, horizon]` with RK4 step close to (at most) `h`.
    pub fn horizontal(x0: DVector<f64>, controls: Vec<DVector<f64>>, horizon: f64, h: f64) -> Self {
        let k = controls.len().max(1);
        let vertical = vec![0.0; controls.len()];
        Self::with_vertical(x0, controls, vertical, horizon / k as f64, h)
    }

    pub fn with_vertical(
        x0: DVector<f64>,
        controls: Vec<DVector<f64>>,
        vertical: Vec<f64>,
        segment_duration: f64,
        h: f64,
    ) -> Self {
        assert_eq!(controls.len(), vertical.len(), "one vertical control per segment");
        assert!(h > 0.0 && segment_duration >= 0.0);
        let steps_per_segment = ((segment_duration / h).ceil() as usize).max(1);
        ControlPath { x0, controls, vertical, segment_duration, steps_per_segment }
    }

    pub fn step(&self) -> f64 {
        self.segment_duration / self.steps_per_segment as f64
    }

    pub fn horizon(&self) -> f64 {
        self.segment_duration * self.controls.len() as f64
    }

    pub fn is_horizontal(&self) -> bool {
        self.vertical.iter().all(|&v| v == 0.0)
    }

    /// Controls traversed backwards, starting at `x1`.
    pub fn reversed(&self, x1: DVector<f64>) -> Self {
        ControlPath {
            x0: x1,
            controls: self.controls.iter().rev().map(|u| -u).collect(),
            vertical: self.vertical.iter().rev().map(|v| -v).collect(),
            segment_duration: self.segment_duration,
            steps_per_segment: self.steps_per_segment,
        }
    }

    /// Same controls with a finer (or coarser) step count per segment.
    pub fn with_steps_per_segment(mut self, steps: usize) -> Self {
        self.steps_per_segment = steps.max(1);
        self
    }
}

/// A sampled curve: `nodes` on a grid of spacing `h/2` and, for every RK4
/// step `j`, the velocities at nodes `2j`, `2j+1`, `2j+2`.
#[derive(Debug, Clone)]
pub struct Curve {
    pub h: f64,
    pub nodes: Vec<DVector<f64>>,
    pub velocities: Vec<[DVector<f64>; 3]>,
}

impl Curve {
    pub fn steps(&self) -> usize {
        self.velocities.len()
    }

    pub fn start(&self) -> &DVector<f64> {
        &self.nodes[0]
    }

    pub fn end(&self) -> &DVector<f64> {
        self.nodes.last().expect("curve has at least one node")
    }

    pub fn duration(&self) -> f64 {
        self.h * self.steps() as f64
    }

    /// Constant curve with `steps` zero-velocity steps.
    pub fn constant(x: DVector<f64>, h: f64, steps: usize) -> Self {
        let zero = DVector::zeros(x.len());
        Curve {
            h,
            nodes: vec![x; 2 * steps + 1],
            velocities: vec![[zero.clone(), zero.clone(), zero]; steps],
        }
    }

    /// `self` followed by `other`; both must share the step and meet end to start.
    pub fn concat(&self, other: &Curve) -> Result<Curve> {
        if (self.h - other.h).abs() > 1e-15 {
            return Err(Error::Precondition("concatenated curves need equal steps".into()));
        }
        if (self.end() - other.start()).amax() > 1e-9 {
            return Err(Error::Precondition("concatenated curves do not meet".into()));
        }
        let mut nodes = self.nodes.clone();
        nodes.extend(other.nodes.iter().skip(1).cloned());
        let mut velocities = self.velocities.clone();
        velocities.extend(other.velocities.iter().cloned());
        Ok(Curve { h: self.h, nodes, velocities })
    }

    /// `max |θ(velocity)|` over all stages.
    pub fn max_theta_speed(&self, chart: &ContactChart) -> f64 {
        let mut worst = 0.0_f64;
        for (j, vel) in self.velocities.iter().enumerate() {
            for (k, v) in vel.iter().enumerate() {
                let th = chart.theta(&self.nodes[2 * j + k]);
                worst = worst.max(th.dot(v).abs());
            }
        }
        worst
    }
}

fn rk4_point<F: Fn(&DVector<f64>) -> DVector<f64>>(x: &DVector<f64>, dt: f64, f: F) -> DVector<f64> {
    let k1 = f(x);
    let k2 = f(&(x + &k1 * (dt / 2.0)));
    let k3 = f(&(x + &k2 * (dt / 2.0)));
    let k4 = f(&(x + &k3 * dt));
    x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0)
}

/// Integrate the control system, sampling at spacing `h/2`.
pub fn integrate_path(chart: &ContactChart, path: &ControlPath) -> Result<Curve> {
    chart.check_domain(&path.x0)?;
    let r = chart.rank();
    for u in &path.controls {
        if u.len() != r {
            return Err(Error::Precondition(format!("control has {} entries, expected {r}", u.len())));
        }
    }
    let h = path.step();
    let velocity = |x: &DVector<f64>, u: &DVector<f64>, v: f64| -> DVector<f64> {
        chart.frame(x) * u + chart.xi(x) * v
    };
    let mut nodes = vec![path.x0.clone()];
    let mut velocities = Vec::with_capacity(path.controls.len() * path.steps_per_segment);
    let mut x = path.x0.clone();
    let mut t = 0.0;
    for (u, &v) in path.controls.iter().zip(&path.vertical) {
        for _ in 0..path.steps_per_segment {
            let v0 = velocity(&x, u, v);
            let xm = rk4_point(&x, h / 2.0, |y| velocity(y, u, v));
            check_inside(chart, &xm, t + h / 2.0)?;
            let vm = velocity(&xm, u, v);
            let x1 = rk4_point(&xm, h / 2.0, |y| velocity(y, u, v));
            check_inside(chart, &x1, t + h)?;
            let v1 = velocity(&x1, u, v);
            nodes.push(xm);
            nodes.push(x1.clone());
            velocities.push([v0, vm, v1]);
            x = x1;
            t += h;
        }
    }
    Ok(Curve { h, nodes, velocities })
}

/// Integrate a horizontal control path; rejects paths with vertical controls.
pub fn integrate_horizontal(chart: &ContactChart, path: &ControlPath) -> Result<Curve> {
    if !path.is_horizontal() {
        let worst = path.vertical.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        return Err(Error::NonHorizontal { residual: worst });
    }
    integrate_path(chart, path)
}

fn check_inside(chart: &ContactChart, x: &DVector<f64>, t: f64) -> Result<()> {
    if chart.contains(x) {
        Ok(())
    } else {
        Err(Error::DomainExit { t, point: x.iter().cloned().collect() })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransportKind {
    /// Horizontal connection; horizontal curves only.
    Schouten,
    /// `∇^0_ξ X = [ξ, X]`.
    Adapted,
    /// `∇^W_ξ X = [ξ, X] + N X`.
    Wagner,
}

#[derive(Debug, Clone, Copy)]
pub struct TransportOptions {
    /// Project the transport onto isometries every this many steps.
    pub reorthonormalize_every: Option<usize>,
    /// Relative tolerance on `|θ(velocity)|` for Schouten transport.
    pub horizontal_tol: f64,
}

impl Default for TransportOptions {
    fn default() -> Self {
        TransportOptions { reorthonormalize_every: Some(50), horizontal_tol: 1e-6 }
    }
}

#[derive(Debug, Clone)]
pub struct TransportResult {
    pub kind: TransportKind,
    /// Maps frame components at the start to frame components at the end.
    pub tau: DMatrix<f64>,
    pub start: DVector<f64>,
    pub end: DVector<f64>,
    /// `‖τ̂^T τ̂ − I‖_F` with `τ̂` in orthonormalized frames.
    pub isometry_defect: f64,
}

impl TransportResult {
    /// Transport between `g`-orthonormalized frames at the endpoints.
    pub fn orthonormal(&self, chart: &ContactChart) -> Result<DMatrix<f64>> {
        let f0 = ortho_at(chart, &self.start)?;
        let f1 = ortho_at(chart, &self.end)?;
        Ok(&f1.lt * &self.tau * &f0.lt_inv)
    }
}

pub(crate) fn ortho_at(chart: &ContactChart, x: &DVector<f64>) -> Result<OrthoFrame> {
    OrthoFrame::new(&chart.metric(x)).ok_or_else(|| Error::NotPositiveDefinite { point: x.iter().cloned().collect() })
}

/// Connection data at one node: `Γ_a`, `[ξ, ·]_D`, optional `N`, and the split
/// of tangent vectors into frame components and `θ`.
struct NodeConnection {
    gamma: Vec<DMatrix<f64>>,
    vertical: DMatrix<f64>,
    split: DMatrix<f64>,
}

fn node_connection(chart: &ContactChart, x: &DVector<f64>, kind: TransportKind) -> Result<NodeConnection> {
    match kind {
        TransportKind::Wagner => {
            let so = second_order_at(chart, x)?;
            let n = wagner_n_from(&so.curvature, &so.geo.omega)?;
            Ok(NodeConnection { vertical: &so.geo.sf.d + n, split: so.geo.split, gamma: so.gamma })
        }
        _ => {
            let (geo, gamma) = schouten_at(chart, x)?;
            Ok(NodeConnection { vertical: geo.sf.d, split: geo.split, gamma })
        }
    }
}

fn connection_matrix(
    nc: &NodeConnection,
    vel: &DVector<f64>,
    kind: TransportKind,
    tol: f64,
) -> Result<DMatrix<f64>> {
    let comps = &nc.split * vel;
    let r = nc.gamma.len();
    let v = comps[r];
    if kind == TransportKind::Schouten && v.abs() > tol * (1.0 + vel.norm()) {
        return Err(Error::NonHorizontal { residual: v.abs() });
    }
    let mut a = DMatrix::zeros(r, r);
    for (k, g) in nc.gamma.iter().enumerate() {
        a += g * comps[k];
    }
    if kind != TransportKind::Schouten {
        a += &nc.vertical * v;
    }
    Ok(a)
}

/// Solve `τ' = −A(t) τ`, `τ(0) = I` along the curve.
pub fn transport_with(
    chart: &ContactChart,
    curve: &Curve,
    kind: TransportKind,
    opts: TransportOptions,
) -> Result<TransportResult> {
    let r = chart.rank();
    let nodes: Vec<NodeConnection> =
        curve.nodes.iter().map(|x| node_connection(chart, x, kind)).collect::<Result<_>>()?;
    let f0 = ortho_at(chart, curve.start())?;
    let h = curve.h;
    let mut tau = DMatrix::<f64>::identity(r, r);
    for (j, vel) in curve.velocities.iter().enumerate() {
        let a0 = connection_matrix(&nodes[2 * j], &vel[0], kind, opts.horizontal_tol)?;
        let am = connection_matrix(&nodes[2 * j + 1], &vel[1], kind, opts.horizontal_tol)?;
        let a1 = connection_matrix(&nodes[2 * j + 2], &vel[2], kind, opts.horizontal_tol)?;
        let k1 = -(&a0 * &tau);
        let k2 = -(&am * (&tau + &k1 * (h / 2.0)));
        let k3 = -(&am * (&tau + &k2 * (h / 2.0)));
        let k4 = -(&a1 * (&tau + &k3 * h));
        tau += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        if let Some(every) = opts.reorthonormalize_every {
            if every > 0 && (j + 1) % every == 0 {
                let fj = ortho_at(chart, &curve.nodes[2 * j + 2])?;
                let hat = &fj.lt * &tau * &f0.lt_inv;
                tau = &fj.lt_inv * linalg::orthogonalize(&hat) * &f0.lt;
            }
        }
    }
    let f1 = ortho_at(chart, curve.end())?;
    let hat = &f1.lt * &tau * &f0.lt_inv;
    let isometry_defect = (hat.transpose() * &hat - DMatrix::<f64>::identity(r, r)).norm();
    Ok(TransportResult { kind, tau, start: curve.start().clone(), end: curve.end().clone(), isometry_defect })
}

pub fn transport(chart: &ContactChart, curve: &Curve, kind: TransportKind) -> Result<TransportResult> {
    transport_with(chart, curve, kind, TransportOptions::default())
}

/// Transport of the line bundle `<ξ>` under `∇^θ_X ξ = θ(X) ξ`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ThetaTransport {
    /// `∫_μ θ` by composite Simpson on the samples.
    pub integral: f64,
    /// `exp(−∫θ)`.
    pub factor: f64,
    /// RK4 solution of `λ' = −λ θ(μ')`, `λ(0) = 1`.
    pub factor_ode: f64,
}

impl ThetaTransport {
    pub fn relative_error(&self) -> f64 {
        (self.factor - self.factor_ode).abs() / self.factor
    }
}

pub fn transport_theta(chart: &ContactChart, curve: &Curve) -> ThetaTransport {
    let h = curve.h;
    let mut integral = 0.0;
    let mut lambda = 1.0;
    for (j, vel) in curve.velocities.iter().enumerate() {
        let th: Vec<f64> = (0..3).map(|k| chart.theta(&curve.nodes[2 * j + k]).dot(&vel[k])).collect();
        integral += h / 6.0 * (th[0] + 4.0 * th[1] + th[2]);
        let k1 = -lambda * th[0];
        let k2 = -(lambda + h / 2.0 * k1) * th[1];
        let k3 = -(lambda + h / 2.0 * k2) * th[1];
        let k4 = -(lambda + h * k3) * th[2];
        lambda += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    ThetaTransport { integral, factor: (-integral).exp(), factor_ode: lambda }
}

/// Maximal RK4 step used for the Reeb flow.
pub const REEB_STEP: f64 = 0.01;

/// Reeb flow `φ_s(x)`, generic so that it can be differentiated.
pub fn reeb_flow_generic<S: Scalar>(chart: &ContactChart, x: &DVector<S>, s: S) -> DVector<S> {
    let steps = ((s.re().abs() / REEB_STEP).ceil() as usize).max(1);
    let dt = s / S::from_f64(steps as f64);
    let half = dt * S::from_f64(0.5);
    let sixth = dt / S::from_f64(6.0);
    let two = S::from_f64(2.0);
    let mut y = x.clone();
    for _ in 0..steps {
        let k1 = chart.xi(&y);
        let k2 = chart.xi(&(&y + &k1 * half));
        let k3 = chart.xi(&(&y + &k2 * half));
        let k4 = chart.xi(&(&y + &k3 * dt));
        y += (k1 + k2 * two + k3 * two + k4) * sixth;
    }
    y
}

pub fn reeb_flow(chart: &ContactChart, x: &DVector<f64>, s: f64) -> Result<DVector<f64>> {
    chart.check_domain(x)?;
    let y = reeb_flow_generic(chart, x, s);
    check_inside(chart, &y, s)?;
    Ok(y)
}

/// `(φ_s(x), dφ_s(w))`.
pub fn reeb_flow_push(chart: &ContactChart, x: &DVector<f64>, w: &DVector<f64>, s: f64) -> (DVector<f64>, DVector<f64>) {
    let xd = ad::seed(x, w);
    let y = reeb_flow_generic(chart, &xd, Dual::constant(s));
    ad::vec_parts(&y)
}

/// `μ̃(t) = φ_{f(t)} μ(t)` with `f(t) = −∫_0^t θ(μ')`, which is horizontal.
pub fn horizontalize(chart: &ContactChart, mu: &Curve) -> Result<Curve> {
    let h = mu.h;
    let delta = h / 2.0;
    let mut f = vec![0.0; mu.nodes.len()];
    let mut theta_stage = Vec::with_capacity(mu.steps());
    for (j, vel) in mu.velocities.iter().enumerate() {
        let th: [f64; 3] = std::array::from_fn(|k| chart.theta(&mu.nodes[2 * j + k]).dot(&vel[k]));
        f[2 * j + 1] = f[2 * j] - delta * (5.0 * th[0] + 8.0 * th[1] - th[2]) / 12.0;
        f[2 * j + 2] = f[2 * j] - h / 6.0 * (th[0] + 4.0 * th[1] + th[2]);
        theta_stage.push(th);
    }
    let mut nodes = Vec::with_capacity(mu.nodes.len());
    for (i, x) in mu.nodes.iter().enumerate() {
        let y = reeb_flow_generic(chart, x, f[i]);
        check_inside(chart, &y, i as f64 * delta)?;
        nodes.push(y);
    }
    let mut velocities = Vec::with_capacity(mu.steps());
    for (j, vel) in mu.velocities.iter().enumerate() {
        let stage: [DVector<f64>; 3] = std::array::from_fn(|k| {
            let x = &mu.nodes[2 * j + k];
            let w = &vel[k] - chart.xi(x) * theta_stage[j][k];
            reeb_flow_push(chart, x, &w, f[2 * j + k]).1
        });
        velocities.push(stage);
    }
    Ok(Curve { h, nodes, velocities })
}

/// `‖τ^0_μ − τ_{μ̃}‖_F` for a loop `μ` with `∫_μ θ = 0`.
#[derive(Debug, Clone, Serialize)]
pub struct EquivalenceCheck {
    pub residual: f64,
    pub theta_integral: f64,
    pub closure_defect: f64,
    pub horizontal_defect: f64,
}

/// Tolerance on `|∫_μ θ|` for a loop to count as balanced.
pub const BALANCE_TOL: f64 = 1e-8;

pub fn transport_equivalence_check(chart: &ContactChart, mu: &Curve) -> Result<EquivalenceCheck> {
    let closure = (mu.end() - mu.start()).amax();
    if closure > 1e-8 {
        return Err(Error::Precondition(format!("μ is not a loop (endpoint gap {closure:e})")));
    }
    let th = transport_theta(chart, mu);
    if th.integral.abs() > BALANCE_TOL {
        return Err(Error::Precondition(format!("∫θ = {:e} ≠ 0: μ̃ would not close", th.integral)));
    }
    let tilde = horizontalize(chart, mu)?;
    let tilde_gap = (tilde.end() - tilde.start()).amax();
    let horizontal_defect = tilde.max_theta_speed(chart);
    let adapted = transport(chart, mu, TransportKind::Adapted)?;
    let schouten = transport(chart, &tilde, TransportKind::Schouten)?;
    Ok(EquivalenceCheck {
        residual: (&adapted.tau - &schouten.tau).norm(),
        theta_integral: th.integral,
        closure_defect: tilde_gap,
        horizontal_defect,
    })
}

/// Sampling parameters for random control paths.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplerConfig {
    pub n_paths: usize,
    pub segments: usize,
    pub horizon: f64,
    pub magnitude: f64,
    pub step: f64,
    pub seed: u64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig { n_paths: 64, segments: 4, horizon: 1.0, magnitude: 0.5, step: 0.01, seed: 0 }
    }
}

/// Attempts per path before giving up on staying inside the domain.
pub const MAX_RESAMPLES: usize = 200;

fn path_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64 + 1);
    rng
}

fn draw_path<R: Rng>(
    rng: &mut R,
    x0: &DVector<f64>,
    r: usize,
    cfg: &SamplerConfig,
    vertical_magnitude: f64,
) -> ControlPath {
    let k = cfg.segments.max(1);
    let controls: Vec<DVector<f64>> =
        (0..k).map(|_| DVector::from_fn(r, |_, _| cfg.magnitude * (2.0 * rng.random::<f64>() - 1.0))).collect();
    let vertical: Vec<f64> = (0..k).map(|_| vertical_magnitude * (2.0 * rng.random::<f64>() - 1.0)).collect();
    ControlPath::with_vertical(x0.clone(), controls, vertical, cfg.horizon / k as f64, cfg.step)
}

/// Sample paths and integrate them; `vertical_magnitude = 0` gives horizontal paths.
pub fn sample_curves(
    chart: &ContactChart,
    x0: &DVector<f64>,
    cfg: &SamplerConfig,
    vertical_magnitude: f64,
) -> Result<Vec<(ControlPath, Curve)>> {
    chart.check_domain(x0)?;
    if !(cfg.horizon > 0.0 && cfg.step > 0.0 && cfg.magnitude >= 0.0) {
        return Err(Error::InvalidConfig("sampler horizon and step must be positive".into()));
    }
    let r = chart.rank();
    (0..cfg.n_paths)
        .into_par_iter()
        .map(|i| {
            let mut rng = path_rng(cfg.seed, i);
            for _ in 0..MAX_RESAMPLES {
                let p = draw_path(&mut rng, x0, r, cfg, vertical_magnitude);
                match integrate_path(chart, &p) {
                    Ok(c) => return Ok((p, c)),
                    Err(Error::DomainExit { .. }) => continue,
                    Err(e) => return Err(e),
                }
            }
            Err(Error::Sampling(format!("path {i}: no in-domain path after {MAX_RESAMPLES} draws")))
        })
        .collect()
}

/// Deterministic random horizontal paths from `x0`.
pub fn sample_paths(chart: &ContactChart, x0: &DVector<f64>, cfg: &SamplerConfig) -> Result<Vec<ControlPath>> {
    Ok(sample_curves(chart, x0, cfg, 0.0)?.into_iter().map(|(p, _)| p).collect())
}

/// A loop `γ · c · γ̄_λ · c^{-1}` with zero-sum vertical controls: a random
/// polygon `γ`, a connecting segment `c`, and the polygon reversed and scaled
/// by `λ`, where `λ` is tuned so that the loop closes. Since `θ(velocity) = v`
/// exactly, `∫θ = 0` holds by construction.
///
/// `magnitude` bounds the planar distance the polygon and link reach from `x0`.
/// Draws whose loop cannot close with `λ ∈ [0.5, 2]` inside the domain are redrawn.
///
/// Closure of the polygon in the first `2m` coordinates requires frames of
/// the form `e_a = ∂_a + (·)∂_t` (true for the built-ins, not for twisted frames).
pub fn balanced_loop(
    chart: &ContactChart,
    x0: &DVector<f64>,
    polygon_sides: usize,
    magnitude: f64,
    vertical_magnitude: f64,
    h: f64,
    seed: u64,
) -> Result<(ControlPath, Curve)> {
    let sides = polygon_sides.max(3);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..MAX_RESAMPLES {
        match balanced_loop_attempt(chart, x0, sides, magnitude, vertical_magnitude, h, &mut rng) {
            Ok(Some(found)) => return Ok(found),
            Ok(None) | Err(Error::DomainExit { .. }) => {}
            Err(e) => return Err(e),
        }
    }
    Err(Error::Sampling(format!("no closing balanced loop after {MAX_RESAMPLES} draws")))
}

fn balanced_loop_attempt(
    chart: &ContactChart,
    x0: &DVector<f64>,
    sides: usize,
    magnitude: f64,
    vertical_magnitude: f64,
    h: f64,
    rng: &mut ChaCha8Rng,
) -> Result<Option<(ControlPath, Curve)>> {
    let r = chart.rank();
    let mut base: Vec<DVector<f64>> =
        (0..sides - 1).map(|_| DVector::from_fn(r, |_, _| magnitude * (2.0 * rng.random::<f64>() - 1.0))).collect();
    let closing = -base.iter().fold(DVector::zeros(r), |acc, u| acc + u);
    base.push(closing);
    let mut link = DVector::from_fn(r, |_, _| magnitude * (2.0 * rng.random::<f64>() - 1.0));
    // keep the planar excursion within `magnitude`
    let mut reach = 0.0_f64;
    let mut vertex = DVector::zeros(r);
    for u in &base {
        vertex += u;
        reach = reach.max(vertex.norm());
    }
    let scale = magnitude / (reach + link.norm()).max(f64::MIN_POSITIVE);
    base.iter_mut().for_each(|u| *u *= scale);
    link *= scale;
    let n_seg = 2 * sides + 2;
    let mut vertical: Vec<f64> = (0..n_seg).map(|_| vertical_magnitude * (2.0 * rng.random::<f64>() - 1.0)).collect();
    let mean = vertical.iter().sum::<f64>() / n_seg as f64;
    vertical.iter_mut().for_each(|v| *v -= mean);

    let build = |lambda: f64| -> ControlPath {
        let mut controls = base.clone();
        controls.push(link.clone());
        controls.extend(base.iter().rev().map(|u| -u * lambda));
        controls.push(-&link);
        ControlPath::with_vertical(x0.clone(), controls, vertical.clone(), 1.0, h)
    };
    let gap = |lambda: f64| -> Result<(f64, ControlPath, Curve)> {
        let p = build(lambda);
        let c = integrate_path(chart, &p)?;
        let d = c.end() - c.start();
        let planar = d.rows(0, r).amax();
        if planar > 1e-9 {
            return Err(Error::Precondition("frame is not coordinate-aligned: polygon does not close".into()));
        }
        Ok((d[r], p, c))
    };
    // secant iteration on the t-gap
    let (mut l0, mut l1) = (1.0, 1.1);
    let (mut g0, p0, c0) = gap(l0)?;
    if g0.abs() < 1e-13 {
        return Ok(Some((p0, c0)));
    }
    let (mut g1, mut p1, mut c1) = gap(l1)?;
    for _ in 0..60 {
        if g1.abs() < 1e-13 {
            break;
        }
        let denom = g1 - g0;
        if denom == 0.0 {
            break;
        }
        let l2 = l1 - g1 * (l1 - l0) / denom;
        if !(0.5..=2.0).contains(&l2) {
            return Ok(None);
        }
        let (g2, p2, c2) = gap(l2)?;
        l0 = l1;
        g0 = g1;
        l1 = l2;
        g1 = g2;
        p1 = p2;
        c1 = c2;
    }
    Ok((g1.abs() <= 1e-10).then_some((p1, c1)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifold::{heisenberg, product_construction, FactorSpec};

    fn discs(b1: f64, b2: f64) -> ContactChart {
        product_construction(&[FactorSpec::poincare_disc(b1), FactorSpec::poincare_disc(b2)]).unwrap()
    }

    fn unit(r: usize, i: usize, s: f64) -> DVector<f64> {
        let mut v = DVector::zeros(r);
        v[i] = s;
        v
    }

    #[test]
    fn zero_controls_give_constant_curve() {
        let ch = discs(1.0, 1.0);
        let p = ControlPath::horizontal(ch.origin(), vec![DVector::zeros(4); 3], 1.0, 0.05);
        let c = integrate_horizontal(&ch, &p).unwrap();
        assert!(c.nodes.iter().all(|x| *x == ch.origin()));
        let t = transport(&ch, &c, TransportKind::Schouten).unwrap();
        assert!((t.tau - DMatrix::<f64>::identity(4, 4)).amax() < 1e-15);
    }

    #[test]
    fn heisenberg_square_lifts_by_enclosed_area() {
        // ∮ y dx = −(area) for a counter-clockwise square of side L, and the
        // horizontal lift moves t by ∮ y dx.
        let ch = heisenberg(2).unwrap();
        let side = 0.7;
        let controls = vec![unit(4, 0, side), unit(4, 1, side), unit(4, 0, -side), unit(4, 1, -side)];
        let p = ControlPath::horizontal(ch.origin(), controls, 4.0, 0.01);
        let c = integrate_horizontal(&ch, &p).unwrap();
        assert!(c.end().rows(0, 4).amax() < 1e-12);
        assert!((c.end()[4] + side * side).abs() < 1e-12);
        assert!(c.max_theta_speed(&ch) < 1e-12);
    }

    #[test]
    fn reversed_controls_retrace() {
        let ch = discs(1.0, 2.0);
        let cfg = SamplerConfig { n_paths: 3, seed: 5, ..Default::default() };
        for (p, c) in sample_curves(&ch, &ch.origin(), &cfg, 0.0).unwrap() {
            let back = integrate_path(&ch, &p.reversed(c.end().clone())).unwrap();
            assert!((back.end() - ch.origin()).amax() < 1e-6);
        }
    }

    #[test]
    fn non_horizontal_schouten_transport_is_rejected() {
        let ch = discs(1.0, 1.0);
        let p = ControlPath::with_vertical(ch.origin(), vec![unit(4, 0, 0.3)], vec![0.5], 1.0, 0.05);
        let c = integrate_path(&ch, &p).unwrap();
        assert!(matches!(transport(&ch, &c, TransportKind::Schouten), Err(Error::NonHorizontal { .. })));
        assert!(transport(&ch, &c, TransportKind::Adapted).is_ok());
        assert!(matches!(integrate_horizontal(&ch, &p), Err(Error::NonHorizontal { .. })));
    }

    #[test]
    fn heisenberg_transport_is_identity() {
        let ch = heisenberg(2).unwrap();
        let cfg = SamplerConfig { n_paths: 4, magnitude: 2.0, seed: 2, ..Default::default() };
        for (_, c) in sample_curves(&ch, &ch.origin(), &cfg, 0.0).unwrap() {
            for kind in [TransportKind::Schouten, TransportKind::Adapted, TransportKind::Wagner] {
                let t = transport(&ch, &c, kind).unwrap();
                assert!((t.tau - DMatrix::<f64>::identity(4, 4)).amax() < 1e-12);
            }
        }
    }

    #[test]
    fn disc_product_transport_is_block_diagonal_isometry() {
        let ch = discs(1.0, 2.0);
        let cfg = SamplerConfig { n_paths: 4, seed: 3, ..Default::default() };
        for (_, c) in sample_curves(&ch, &ch.origin(), &cfg, 0.0).unwrap() {
            let ts = transport(&ch, &c, TransportKind::Schouten).unwrap();
            assert!(ts.tau.view((0, 2), (2, 2)).amax() < 1e-12);
            assert!(ts.tau.view((2, 0), (2, 2)).amax() < 1e-12);
            assert!(ts.isometry_defect < 1e-6);
            // All extensions agree on horizontal curves.
            for kind in [TransportKind::Adapted, TransportKind::Wagner] {
                let t = transport(&ch, &c, kind).unwrap();
                assert!((&t.tau - &ts.tau).norm() < 1e-6);
            }
        }
    }

    #[test]
    fn theta_factor_on_reeb_segment() {
        let ch = discs(1.0, 1.0);
        let s = 0.8;
        let p = ControlPath::with_vertical(ch.origin(), vec![DVector::zeros(4)], vec![1.0], s, 0.01);
        let c = integrate_path(&ch, &p).unwrap();
        let th = transport_theta(&ch, &c);
        assert!((th.factor - (-s).exp()).abs() < 1e-12);
        assert!((th.factor_ode - (-s).exp()).abs() < 1e-9);
    }

    #[test]
    fn theta_factor_multiplies_under_concatenation() {
        let ch = discs(1.0, 2.0);
        let cfg = SamplerConfig { n_paths: 2, seed: 8, ..Default::default() };
        let a = sample_curves(&ch, &ch.origin(), &cfg, 0.7).unwrap();
        let first = &a[0].1;
        let p2 = ControlPath { x0: first.end().clone(), ..a[1].0.clone() };
        let second = integrate_path(&ch, &p2).unwrap();
        let joined = first.concat(&second).unwrap();
        let (f1, f2, f12) = (transport_theta(&ch, first), transport_theta(&ch, &second), transport_theta(&ch, &joined));
        assert!((f12.factor - f1.factor * f2.factor).abs() < 1e-12 * f12.factor.max(1.0));
        assert!(f12.factor > 0.0 && f12.factor_ode > 0.0);
    }

    #[test]
    fn reeb_flow_is_a_flow() {
        let ch = discs(1.0, 1.0);
        let x = ch.random_points(1, 3).remove(0);
        assert_eq!(reeb_flow(&ch, &x, 0.0).unwrap(), x);
        let y = reeb_flow(&ch, &x, 0.7).unwrap();
        assert!((y[4] - x[4] - 0.7).abs() < 1e-12);
        assert!(y.rows(0, 4) == x.rows(0, 4));
        let z = reeb_flow(&ch, &reeb_flow(&ch, &x, 0.3).unwrap(), 0.4).unwrap();
        assert!((z - y).amax() < 1e-7);
    }

    #[test]
    fn horizontalization_of_special_curves() {
        let ch = discs(1.0, 2.0);
        // horizontal input is unchanged
        let cfg = SamplerConfig { n_paths: 1, seed: 4, ..Default::default() };
        let (_, c) = sample_curves(&ch, &ch.origin(), &cfg, 0.0).unwrap().remove(0);
        let ct = horizontalize(&ch, &c).unwrap();
        for (a, b) in c.nodes.iter().zip(&ct.nodes) {
            assert!((a - b).amax() < 1e-12);
        }
        // pure Reeb segment collapses to a point
        let p = ControlPath::with_vertical(ch.origin(), vec![DVector::zeros(4)], vec![1.0], 0.5, 0.01);
        let c = integrate_path(&ch, &p).unwrap();
        let ct = horizontalize(&ch, &c).unwrap();
        for x in &ct.nodes {
            assert!((x - ch.origin()).amax() < 1e-12);
        }
    }

    #[test]
    fn horizontalized_curve_is_horizontal_with_predicted_endpoint() {
        let ch = discs(1.0, 2.0).with_frame_twist(0.3);
        let cfg = SamplerConfig { n_paths: 5, seed: 12, ..Default::default() };
        for (_, c) in sample_curves(&ch, &ch.origin(), &cfg, 0.8).unwrap() {
            let ct = horizontalize(&ch, &c).unwrap();
            assert!(ct.max_theta_speed(&ch) < 1e-6);
            let th = transport_theta(&ch, &c);
            let predicted = reeb_flow(&ch, c.end(), -th.integral).unwrap();
            assert!((ct.end() - predicted).amax() < 1e-9);
        }
    }

    #[test]
    fn balanced_loop_equivalence() {
        let ch = discs(1.0, 2.0);
        let (_, mu) = balanced_loop(&ch, &ch.origin(), 4, 0.4, 0.5, 0.02, 1).unwrap();
        let chk = transport_equivalence_check(&ch, &mu).unwrap();
        assert!(chk.residual < 1e-4, "{chk:?}");
        // the loop has nontrivial holonomy
        let t = transport(&ch, &mu, TransportKind::Adapted).unwrap();
        assert!((t.tau - DMatrix::<f64>::identity(4, 4)).amax() > 1e-4);
    }

    #[test]
    fn balanced_loop_equivalence_in_twisted_frame() {
        // loops are built where the polygon closes, then checked in a frame
        // that is not Reeb-invariant
        let plain = discs(1.0, 2.0);
        let twisted = discs(1.0, 2.0).with_frame_twist(0.3);
        for seed in 0..3 {
            let (_, mu) = balanced_loop(&plain, &plain.origin(), 4, 0.4, 0.5, 0.01, seed).unwrap();
            let chk = transport_equivalence_check(&twisted, &mu).unwrap();
            assert!(chk.residual < 1e-4, "{chk:?}");
        }
    }

    #[test]
    fn constant_loop_has_zero_residual() {
        let ch = discs(1.0, 1.0);
        let c = Curve::constant(ch.origin(), 0.05, 4);
        let chk = transport_equivalence_check(&ch, &c).unwrap();
        assert_eq!(chk.residual, 0.0);
    }

    #[test]
    fn sampler_contract() {
        let ch = discs(1.0, 1.0);
        let x0 = ch.origin();
        let empty = SamplerConfig { n_paths: 0, ..Default::default() };
        assert!(sample_paths(&ch, &x0, &empty).unwrap().is_empty());
        let cfg = SamplerConfig { n_paths: 6, seed: 77, ..Default::default() };
        assert_eq!(sample_paths(&ch, &x0, &cfg).unwrap(), sample_paths(&ch, &x0, &cfg).unwrap());
        let still = SamplerConfig { magnitude: 0.0, ..cfg };
        for (_, c) in sample_curves(&ch, &x0, &still, 0.0).unwrap() {
            assert!(c.nodes.iter().all(|x| x == &x0));
        }
    }

    #[test]
    fn transport_converges_at_fourth_order() {
        let ch = discs(1.0, 2.0);
        let cfg = SamplerConfig { n_paths: 1, seed: 21, magnitude: 0.8, ..Default::default() };
        let (p, _) = sample_curves(&ch, &ch.origin(), &cfg, 0.0).unwrap().remove(0);
        let opts = TransportOptions { reorthonormalize_every: None, ..Default::default() };
        let tau = |steps: usize| {
            let c = integrate_path(&ch, &p.clone().with_steps_per_segment(steps)).unwrap();
            transport_with(&ch, &c, TransportKind::Schouten, opts).unwrap().tau
        };
        let reference = tau(256);
        let e1 = (tau(4) - &reference).norm();
        let e2 = (tau(8) - &reference).norm();
        let ratio = e1 / e2;
        assert!((10.0..22.0).contains(&ratio), "ratio {ratio}");
    }
}
