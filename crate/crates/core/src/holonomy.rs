//! Holonomy algebras by Ambrose–Singer sampling, and their structure.
//!
//! All algebras live in so(2m) with respect to a `g`-orthonormalized frame at
//! the base point and use the trace form `<A, B> = tr(A^T B)`.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::connection::{add_omega_n, curvature_on_bivector, second_order_at, wagner_n_from, Curvature};
use crate::error::{Error, Result};
use crate::linalg::{self, bracket, frob, so_basis};
use crate::manifold::ContactChart;
use crate::transport::{ortho_at, sample_curves, transport, Curve, SamplerConfig, TransportKind};

/// Default acceptance threshold for new span directions.
pub const SPAN_TOL: f64 = 1e-6;

/// A subalgebra of so(n) given by a trace-orthonormal basis.
#[derive(Debug, Clone)]
pub struct MatrixLieAlgebra {
    pub n: usize,
    pub basis: Vec<DMatrix<f64>>,
    pub closure_iterations: usize,
    pub residual_tol: f64,
}

impl MatrixLieAlgebra {
    pub fn zero(n: usize, tol: f64) -> Self {
        MatrixLieAlgebra { n, basis: Vec::new(), closure_iterations: 0, residual_tol: tol }
    }

    /// Span of the given matrices (no bracket closure).
    pub fn span(n: usize, mats: &[DMatrix<f64>], tol: f64) -> Self {
        let mut h = Self::zero(n, tol);
        for a in mats {
            h.try_add(a);
        }
        h
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    /// Orthogonal projection onto the span.
    pub fn project(&self, a: &DMatrix<f64>) -> DMatrix<f64> {
        let mut p = DMatrix::zeros(a.nrows(), a.ncols());
        for b in &self.basis {
            p += b * frob(b, a);
        }
        p
    }

    /// Distance from `a` to the span.
    pub fn residual(&self, a: &DMatrix<f64>) -> f64 {
        (a - self.project(a)).norm()
    }

    pub fn contains(&self, a: &DMatrix<f64>, tol: f64) -> bool {
        self.residual(a) <= tol * (1.0 + a.norm())
    }

    /// Gram–Schmidt step; returns whether `a` added a new direction.
    pub fn try_add(&mut self, a: &DMatrix<f64>) -> bool {
        let mut v = a.clone();
        for _ in 0..2 {
            for b in &self.basis {
                v -= b * frob(b, &v);
            }
        }
        let r = v.norm();
        if r > self.residual_tol * (1.0 + a.norm()) {
            self.basis.push(v / r);
            true
        } else {
            false
        }
    }

    /// `{q A q^T}` for orthogonal `q`.
    pub fn conjugated(&self, q: &DMatrix<f64>) -> Self {
        let mats: Vec<_> = self.basis.iter().map(|b| q * b * q.transpose()).collect();
        Self::span(self.n, &mats, self.residual_tol)
    }

    /// Largest distance of a basis bracket from the span.
    pub fn bracket_residual(&self) -> f64 {
        let mut worst = 0.0_f64;
        for (i, a) in self.basis.iter().enumerate() {
            for b in &self.basis[i + 1..] {
                worst = worst.max(self.residual(&bracket(a, b)));
            }
        }
        worst
    }
}

/// Bracket closure of the span of `mats`.
pub fn lie_closure(n: usize, mats: &[DMatrix<f64>], tol: f64) -> Result<MatrixLieAlgebra> {
    let mut h = MatrixLieAlgebra::zero(n, tol);
    for a in mats {
        if a.nrows() != n || a.ncols() != n {
            return Err(Error::Precondition(format!("expected {n}x{n} matrices")));
        }
        let defect = linalg::skew_defect(a);
        if defect > 1e-6 * (1.0 + a.norm()) {
            return Err(Error::Precondition(format!("generator is not skew (defect {defect:e})")));
        }
        h.try_add(&((a - a.transpose()) * 0.5));
    }
    let cap = n * (n - 1) / 2;
    let mut start = 0;
    while start < h.dim() {
        let end = h.dim();
        h.closure_iterations += 1;
        for j in start..end {
            for i in 0..j {
                let c = bracket(&h.basis[i], &h.basis[j]);
                h.try_add(&c);
                if h.dim() > cap {
                    return Err(Error::Numerical(format!("closure exceeded so({n}) dimension {cap}")));
                }
            }
        }
        start = end;
    }
    Ok(h)
}

/// Relative position of two subalgebras at the same base frame.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Comparison {
    pub contained: bool,
    pub ideal: bool,
    pub codim: i64,
    /// Largest distance of a basis element of the small algebra from the big one.
    pub containment_residual: f64,
    /// Largest distance of `[big, small]` from the small algebra.
    pub ideal_residual: f64,
}

pub fn compare_subalgebras(small: &MatrixLieAlgebra, big: &MatrixLieAlgebra, tol: f64) -> Result<Comparison> {
    if small.n != big.n {
        return Err(Error::Precondition("algebras act on spaces of different dimension".into()));
    }
    let containment_residual = small.basis.iter().map(|a| big.residual(a)).fold(0.0, f64::max);
    let mut ideal_residual = 0.0_f64;
    for b in &big.basis {
        for a in &small.basis {
            ideal_residual = ideal_residual.max(small.residual(&bracket(b, a)));
        }
    }
    Ok(Comparison {
        contained: containment_residual <= tol,
        ideal: ideal_residual <= tol,
        codim: big.dim() as i64 - small.dim() as i64,
        containment_residual,
        ideal_residual,
    })
}

/// Symmetric distance between spans: the larger of the two containment residuals.
pub fn mutual_containment(a: &MatrixLieAlgebra, b: &MatrixLieAlgebra) -> f64 {
    let ab = a.basis.iter().map(|x| b.residual(x)).fold(0.0, f64::max);
    let ba = b.basis.iter().map(|x| a.residual(x)).fold(0.0, f64::max);
    ab.max(ba)
}

/// Linear combinations `Σ c_i B_i` in the null space of `c ↦ ([Σ c_i B_i, T])_T`.
fn commuting_combinations(candidates: &[DMatrix<f64>], targets: &[DMatrix<f64>], rel_tol: f64) -> Vec<DMatrix<f64>> {
    if candidates.is_empty() {
        return Vec::new();
    }
    if targets.is_empty() {
        return candidates.to_vec();
    }
    let n = candidates[0].nrows();
    let rows = targets.len() * n * n;
    let mut map = DMatrix::zeros(rows, candidates.len());
    for (i, c) in candidates.iter().enumerate() {
        for (k, t) in targets.iter().enumerate() {
            let br = bracket(c, t);
            map.view_mut((k * n * n, i), (n * n, 1)).copy_from_slice(br.as_slice());
        }
    }
    let ns = linalg::null_space(&map, rel_tol);
    (0..ns.ncols())
        .map(|j| {
            let mut m = DMatrix::zeros(n, n);
            for (i, c) in candidates.iter().enumerate() {
                m += c * ns[(i, j)];
            }
            m
        })
        .collect()
}

/// Relative singular-value cut for commutant and center computations.
const NULL_TOL: f64 = 1e-6;

/// `(h', z(h))`: the center and its trace-orthogonal complement in `h`.
pub fn center_decomposition(h: &MatrixLieAlgebra) -> (MatrixLieAlgebra, MatrixLieAlgebra) {
    let center_mats = commuting_combinations(&h.basis, &h.basis, NULL_TOL);
    let center = MatrixLieAlgebra::span(h.n, &center_mats, h.residual_tol);
    let rest: Vec<_> = h.basis.iter().map(|b| b - center.project(b)).collect();
    let semisimple = MatrixLieAlgebra::span(h.n, &rest, h.residual_tol);
    (semisimple, center)
}

/// The one-dimensional complement `t` of `small` in `big`.
#[derive(Debug, Clone)]
pub struct TComplement {
    /// Unit generator of `t`.
    pub t: DMatrix<f64>,
    /// Orthogonal complement of `t` in the center of `big`.
    pub t_perp: MatrixLieAlgebra,
    /// Distance of `t` from the center of `big`.
    pub center_residual: f64,
    /// Distance of `big` from `small ⊕ t`.
    pub reconstruction_residual: f64,
}

pub fn t_complement(big: &MatrixLieAlgebra, small: &MatrixLieAlgebra) -> Result<TComplement> {
    if big.dim() != small.dim() + 1 {
        return Err(Error::Precondition(format!(
            "t needs codimension one, got dims {} and {}",
            big.dim(),
            small.dim()
        )));
    }
    let mut best: Option<DMatrix<f64>> = None;
    for b in &big.basis {
        let r = b - small.project(b);
        if best.as_ref().is_none_or(|x| r.norm() > x.norm()) {
            best = Some(r);
        }
    }
    let mut t = best.expect("big algebra is nonempty");
    t /= t.norm();
    // deterministic sign: largest entry positive
    let (mut imax, mut vmax) = (0, 0.0_f64);
    for (i, v) in t.iter().enumerate() {
        if v.abs() > vmax.abs() + 1e-12 {
            imax = i;
            vmax = *v;
        }
    }
    if t.as_slice()[imax] < 0.0 {
        t = -t;
    }
    let (_, center) = center_decomposition(big);
    let center_residual = center.residual(&t);
    let rest: Vec<_> = center.basis.iter().map(|c| c - &t * frob(&t, c)).collect();
    let t_perp = MatrixLieAlgebra::span(big.n, &rest, big.residual_tol);
    let mut sum = small.clone();
    sum.try_add(&t);
    let reconstruction_residual = mutual_containment(&sum, big);
    Ok(TComplement { t, t_perp, center_residual, reconstruction_residual })
}

/// Attempts at a commutant element with invertible square.
const J_ATTEMPTS: usize = 32;

/// A complex structure in the commutant of `h` within so(n), if any.
pub fn detect_complex_structure(h: &MatrixLieAlgebra, seed: u64) -> Option<DMatrix<f64>> {
    let n = h.n;
    if n % 2 == 1 {
        return None;
    }
    let commutant = commuting_combinations(&so_basis(n), &h.basis, NULL_TOL);
    if commutant.is_empty() {
        return None;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..J_ATTEMPTS {
        let mut c = DMatrix::zeros(n, n);
        for k in &commutant {
            c += k * (2.0 * rng.random::<f64>() - 1.0);
        }
        let (vals, vecs) = linalg::sorted_symmetric_eigen(&(-(&c * &c)));
        if vals[0] <= 1e-8 * vals[n - 1].max(1e-300) {
            continue;
        }
        let inv_sqrt = DMatrix::from_diagonal(&DVector::from_iterator(n, vals.iter().map(|l| 1.0 / l.sqrt())));
        let j = &c * (&vecs * inv_sqrt * vecs.transpose());
        let sq = (&j * &j + DMatrix::<f64>::identity(n, n)).amax();
        let comm = h.basis.iter().map(|b| bracket(&j, b).amax()).fold(0.0, f64::max);
        if sq < 1e-6 && comm < 1e-6 {
            return Some(j);
        }
    }
    None
}

/// u(m) ⊂ so(2m) for the standard complex structure.
pub fn unitary_algebra(m: usize) -> MatrixLieAlgebra {
    let j = crate::manifold::standard_complex_structure(2 * m);
    let mats: Vec<_> = so_basis(2 * m).iter().map(|e| (e - &j * e * &j) * 0.5).collect();
    MatrixLieAlgebra::span(2 * m, &mats, SPAN_TOL)
}

/// su(m) = [u(m), u(m)].
pub fn special_unitary_algebra(m: usize) -> MatrixLieAlgebra {
    let u = unitary_algebra(m);
    let mut mats = Vec::new();
    for (i, a) in u.basis.iter().enumerate() {
        for b in &u.basis[i + 1..] {
            mats.push(bracket(a, b));
        }
    }
    MatrixLieAlgebra::span(2 * m, &mats, SPAN_TOL)
}

/// Curvature samples conjugated back to the base point, in orthonormal coordinates.
#[derive(Debug, Clone, Default)]
pub struct SchoutenSamples {
    /// `τ^{-1} R^W(e_a, e_b) τ`.
    pub wagner: Vec<DMatrix<f64>>,
    /// `τ^{-1} R(β) τ` over bivectors `β` with `dθ(β) = 0`.
    pub selector: Vec<DMatrix<f64>>,
}

fn pair_samples(curv: &Curvature<f64>, out: &mut Vec<DMatrix<f64>>, conj: &dyn Fn(&DMatrix<f64>) -> DMatrix<f64>) {
    let r = curv.len();
    for a in 0..r {
        for b in a + 1..r {
            out.push(conj(&curv[a][b]));
        }
    }
}

/// Bivectors (as coefficient matrices) with `dθ(β) = 0`, spanning that hyperplane.
pub fn selector_bivectors(omega: &DMatrix<f64>) -> Vec<DMatrix<f64>> {
    let w2 = omega.norm_squared();
    so_basis(omega.nrows())
        .into_iter()
        .map(|b| if w2 > 0.0 { &b - omega * (frob(omega, &b) / w2) } else { b })
        .collect()
}

/// Transport from `x` along each curve, then `conj(A) = τ̂^{-1} Â τ̂` at the endpoint.
fn endpoint_conjugators(
    chart: &ContactChart,
    x: &DVector<f64>,
    curves: &[Curve],
    kind: TransportKind,
) -> Result<Vec<(DVector<f64>, DMatrix<f64>)>> {
    curves
        .par_iter()
        .map(|c| {
            let t = transport(chart, c, kind)?;
            debug_assert!((c.start() - x).amax() == 0.0);
            Ok((c.end().clone(), t.tau))
        })
        .collect()
}

fn with_base(x: &DVector<f64>, curves: Vec<Curve>) -> Vec<Curve> {
    let mut all = vec![Curve::constant(x.clone(), 1.0, 0)];
    all.extend(curves);
    all
}

/// Both Ambrose–Singer variants for the horizontal connection along sampled
/// horizontal curves (the base point itself included).
pub fn as_samples_schouten_both(chart: &ContactChart, x: &DVector<f64>, cfg: &SamplerConfig) -> Result<SchoutenSamples> {
    let curves: Vec<Curve> = sample_curves(chart, x, cfg, 0.0)?.into_iter().map(|(_, c)| c).collect();
    let curves = with_base(x, curves);
    let fx = ortho_at(chart, x)?;
    let ends = endpoint_conjugators(chart, x, &curves, TransportKind::Schouten)?;
    let parts: Vec<SchoutenSamples> = ends
        .par_iter()
        .map(|(y, tau)| -> Result<SchoutenSamples> {
            let so = second_order_at(chart, y)?;
            let tau_inv = linalg::inverse(tau).ok_or_else(|| Error::Numerical("singular transport".into()))?;
            let conj = |a: &DMatrix<f64>| fx.endo(&(&tau_inv * a * tau));
            let n = wagner_n_from(&so.curvature, &so.geo.omega)?;
            let rw = add_omega_n(&so.curvature, &so.geo.omega, &n);
            let mut s = SchoutenSamples::default();
            pair_samples(&rw, &mut s.wagner, &conj);
            for beta in selector_bivectors(&so.geo.omega) {
                s.selector.push(conj(&curvature_on_bivector(&so.curvature, &beta)));
            }
            Ok(s)
        })
        .collect::<Result<_>>()?;
    let mut out = SchoutenSamples::default();
    for p in parts {
        out.wagner.extend(p.wagner);
        out.selector.extend(p.selector);
    }
    Ok(out)
}

pub fn as_samples_schouten(chart: &ContactChart, x: &DVector<f64>, cfg: &SamplerConfig) -> Result<Vec<DMatrix<f64>>> {
    Ok(as_samples_schouten_both(chart, x, cfg)?.wagner)
}

/// Ambrose–Singer samples for the adapted connection along arbitrary curves.
/// Its curvature vanishes on `(ξ, ·)`, so only horizontal pairs contribute.
pub fn as_samples_adapted(chart: &ContactChart, x: &DVector<f64>, cfg: &SamplerConfig) -> Result<Vec<DMatrix<f64>>> {
    let curves: Vec<Curve> = sample_curves(chart, x, cfg, cfg.magnitude)?.into_iter().map(|(_, c)| c).collect();
    let curves = with_base(x, curves);
    let fx = ortho_at(chart, x)?;
    let ends = endpoint_conjugators(chart, x, &curves, TransportKind::Adapted)?;
    let parts: Vec<Vec<DMatrix<f64>>> = ends
        .par_iter()
        .map(|(y, tau)| -> Result<Vec<DMatrix<f64>>> {
            let so = second_order_at(chart, y)?;
            let tau_inv = linalg::inverse(tau).ok_or_else(|| Error::Numerical("singular transport".into()))?;
            let conj = |a: &DMatrix<f64>| fx.endo(&(&tau_inv * a * tau));
            let mut v = Vec::new();
            pair_samples(&so.curvature, &mut v, &conj);
            Ok(v)
        })
        .collect::<Result<_>>()?;
    Ok(parts.into_iter().flatten().collect())
}

/// Holonomy algebras of the horizontal and adapted connections at `x`.
#[derive(Debug, Clone)]
pub struct HolonomyAlgebras {
    /// From `R^W` samples.
    pub horizontal: MatrixLieAlgebra,
    /// From `R(β)`, `dθ(β) = 0` samples.
    pub horizontal_selector: MatrixLieAlgebra,
    pub adapted: MatrixLieAlgebra,
}

pub fn holonomy_algebras(chart: &ContactChart, x: &DVector<f64>, cfg: &SamplerConfig, tol: f64) -> Result<HolonomyAlgebras> {
    let n = chart.rank();
    let s = as_samples_schouten_both(chart, x, cfg)?;
    let a = as_samples_adapted(chart, x, cfg)?;
    Ok(HolonomyAlgebras {
        horizontal: lie_closure(n, &s.wagner, tol)?,
        horizontal_selector: lie_closure(n, &s.selector, tol)?,
        adapted: lie_closure(n, &a, tol)?,
    })
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::manifold::standard_complex_structure;

    pub(crate) fn e(n: usize, p: usize, q: usize) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(n, n);
        m[(p, q)] = 1.0;
        m[(q, p)] = -1.0;
        m
    }

    /// Two generators of su(2) for the standard J (`J e0 = e1`, `J e2 = e3`).
    pub(crate) fn su2_generators() -> Vec<DMatrix<f64>> {
        // i·diag(1, −1) and the real rotation mixing the two complex lines
        let a = e(4, 1, 0) - e(4, 3, 2);
        let b = e(4, 2, 0) + e(4, 3, 1);
        vec![a, b]
    }

    pub(crate) fn u2_basis() -> Vec<DMatrix<f64>> {
        let mut g = su2_generators();
        g.push(e(4, 3, 0) - e(4, 2, 1));
        g.push(standard_complex_structure(4));
        g
    }

    #[test]
    fn empty_closure_is_zero() {
        let h = lie_closure(4, &[], SPAN_TOL).unwrap();
        assert_eq!(h.dim(), 0);
    }

    #[test]
    fn su2_from_two_generators() {
        let h = lie_closure(4, &su2_generators(), SPAN_TOL).unwrap();
        assert_eq!(h.dim(), 3);
        assert!(h.bracket_residual() < 1e-12);
        let j = standard_complex_structure(4);
        for b in &h.basis {
            assert!(bracket(b, &j).amax() < 1e-12, "su(2) commutes with J");
        }
    }

    #[test]
    fn u2_is_closed_and_splits() {
        let h = lie_closure(4, &u2_basis(), SPAN_TOL).unwrap();
        assert_eq!(h.dim(), 4);
        assert_eq!(h.closure_iterations, 1);
        let (ss, z) = center_decomposition(&h);
        assert_eq!((ss.dim(), z.dim()), (3, 1));
        let j = standard_complex_structure(4);
        assert!(z.residual(&j) < 1e-10);
        let su2 = lie_closure(4, &su2_generators(), SPAN_TOL).unwrap();
        assert!(mutual_containment(&ss, &su2) < 1e-10);
        let (ss2, z2) = center_decomposition(&su2);
        assert_eq!((ss2.dim(), z2.dim()), (3, 0));
    }

    #[test]
    fn basis_is_orthonormal_and_skew() {
        let h = lie_closure(6, &[e(6, 0, 1) + e(6, 2, 5) * 0.3, e(6, 1, 2), e(6, 3, 4)], SPAN_TOL).unwrap();
        for (i, a) in h.basis.iter().enumerate() {
            assert!(linalg::skew_defect(a) < 1e-12);
            for (k, b) in h.basis.iter().enumerate() {
                let want = if i == k { 1.0 } else { 0.0 };
                assert!((frob(a, b) - want).abs() < 1e-10);
            }
        }
        assert!(h.bracket_residual() < 1e-8);
    }

    #[test]
    fn full_so4_and_non_skew_input() {
        let all = lie_closure(4, &[e(4, 0, 1), e(4, 1, 2), e(4, 2, 3)], SPAN_TOL).unwrap();
        assert_eq!(all.dim(), 6);
        assert!(detect_complex_structure(&all, 0).is_none());
        let mut bad = e(4, 0, 1);
        bad[(2, 2)] = 1.0;
        assert!(lie_closure(4, &[bad], SPAN_TOL).is_err());
    }

    #[test]
    fn comparisons() {
        let u2 = lie_closure(4, &u2_basis(), SPAN_TOL).unwrap();
        let su2 = lie_closure(4, &su2_generators(), SPAN_TOL).unwrap();
        let c = compare_subalgebras(&su2, &u2, SPAN_TOL).unwrap();
        assert!(c.contained && c.ideal);
        assert_eq!(c.codim, 1);
        let same = compare_subalgebras(&u2, &u2, SPAN_TOL).unwrap();
        assert!(same.contained && same.ideal && same.codim == 0);
        let zero = MatrixLieAlgebra::zero(4, SPAN_TOL);
        let z = compare_subalgebras(&zero, &u2, SPAN_TOL).unwrap();
        assert!(z.contained && z.ideal && z.codim == 4);
        // a line not normalized by so(4) is not an ideal
        let all = lie_closure(4, &[e(4, 0, 1), e(4, 1, 2), e(4, 2, 3)], SPAN_TOL).unwrap();
        let line = MatrixLieAlgebra::span(4, &[e(4, 0, 1)], SPAN_TOL);
        assert!(!compare_subalgebras(&line, &all, SPAN_TOL).unwrap().ideal);
        assert!(compare_subalgebras(&MatrixLieAlgebra::zero(6, SPAN_TOL), &u2, SPAN_TOL).is_err());
    }

    #[test]
    fn t_of_u2_over_su2_is_j() {
        let u2 = lie_closure(4, &u2_basis(), SPAN_TOL).unwrap();
        let su2 = lie_closure(4, &su2_generators(), SPAN_TOL).unwrap();
        let t = t_complement(&u2, &su2).unwrap();
        let j = standard_complex_structure(4);
        assert!((frob(&t.t, &j).abs() - j.norm()).abs() < 1e-10);
        assert!(t.center_residual < 1e-10 && t.reconstruction_residual < 1e-10);
        assert_eq!(t.t_perp.dim(), 0);
        assert!(t_complement(&u2, &u2).is_err());
    }

    #[test]
    fn t_of_two_blocks() {
        let j1 = e(4, 1, 0);
        let j2 = e(4, 3, 2);
        let big = lie_closure(4, &[j1.clone(), j2.clone()], SPAN_TOL).unwrap();
        let small = lie_closure(4, &[&j1 - &j2], SPAN_TOL).unwrap();
        let t = t_complement(&big, &small).unwrap();
        let sum = &j1 + &j2;
        let cos = frob(&t.t, &sum).abs() / sum.norm();
        assert!((cos - 1.0).abs() < 1e-12);
    }

    #[test]
    fn complex_structure_detection() {
        let u2 = lie_closure(4, &u2_basis(), SPAN_TOL).unwrap();
        let j = detect_complex_structure(&u2, 3).unwrap();
        let std = standard_complex_structure(4);
        assert!((&j - &std).amax() < 1e-10 || (&j + &std).amax() < 1e-10);
        let zero = MatrixLieAlgebra::zero(4, SPAN_TOL);
        let j0 = detect_complex_structure(&zero, 1).unwrap();
        assert!((&j0 * &j0 + DMatrix::<f64>::identity(4, 4)).amax() < 1e-8);
        assert!(linalg::skew_defect(&j0) < 1e-8);
    }

    #[test]
    fn conjugation_preserves_dimension() {
        let su2 = lie_closure(4, &su2_generators(), SPAN_TOL).unwrap();
        let q = linalg::orthogonalize(&DMatrix::from_fn(4, 4, |i, j| ((i * 7 + j * 3) % 5) as f64 - 2.0 + if i == j { 3.0 } else { 0.0 }));
        let c = su2.conjugated(&q);
        assert_eq!(c.dim(), 3);
        assert!(c.bracket_residual() < 1e-10);
    }

    fn sampler(seed: u64) -> SamplerConfig {
        SamplerConfig { n_paths: 16, seed, ..Default::default() }
    }

    #[test]
    fn heisenberg_samples_vanish() {
        let ch = crate::manifold::heisenberg(2).unwrap();
        let s = as_samples_schouten_both(&ch, &ch.origin(), &sampler(1)).unwrap();
        assert!(s.wagner.iter().chain(&s.selector).all(|a| a.amax() < 1e-12));
        let h = holonomy_algebras(&ch, &ch.origin(), &sampler(1), SPAN_TOL).unwrap();
        assert_eq!((h.horizontal.dim(), h.adapted.dim()), (0, 0));
    }

    #[test]
    fn base_point_only_gives_wagner_curvature() {
        let ch = crate::manifold::product_construction(&[
            crate::manifold::FactorSpec::poincare_disc(1.0),
            crate::manifold::FactorSpec::poincare_disc(2.0),
        ])
        .unwrap();
        let x = ch.random_points(1, 9).remove(0);
        let cfg = SamplerConfig { n_paths: 0, ..Default::default() };
        let s = as_samples_schouten(&ch, &x, &cfg).unwrap();
        let d = crate::connection::frame_point_data(&ch, &x).unwrap();
        let f = ortho_at(&ch, &x).unwrap();
        assert_eq!(s.len(), 6);
        assert!((&s[0] - f.endo(&d.rw[0][1])).amax() < 1e-12);
    }

    #[test]
    fn equal_discs_give_codimension_one_ideal() {
        let ch = crate::manifold::product_construction(&[
            crate::manifold::FactorSpec::poincare_disc(1.0),
            crate::manifold::FactorSpec::poincare_disc(1.0),
        ])
        .unwrap();
        let h = holonomy_algebras(&ch, &ch.origin(), &sampler(4), SPAN_TOL).unwrap();
        assert_eq!((h.adapted.dim(), h.horizontal.dim()), (2, 1));
        assert!(mutual_containment(&h.horizontal, &h.horizontal_selector) < 1e-6);
        let c = compare_subalgebras(&h.horizontal, &h.adapted, 1e-6).unwrap();
        assert!(c.contained && c.ideal && c.codim == 1);
        let t = t_complement(&h.adapted, &h.horizontal).unwrap();
        let sum = e(4, 1, 0) + e(4, 3, 2);
        assert!((frob(&t.t, &sum).abs() / sum.norm() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn standard_unitary_algebras() {
        for m in 1..=3 {
            assert_eq!(unitary_algebra(m).dim(), m * m);
            assert_eq!(special_unitary_algebra(m).dim(), m * m - 1);
        }
        let su2 = lie_closure(4, &su2_generators(), SPAN_TOL).unwrap();
        assert!(mutual_containment(&su2, &special_unitary_algebra(2)) < 1e-12);
    }
}
