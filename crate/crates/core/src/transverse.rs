//! Transverse Ricci geometry, invariant splittings of `D`, and the Sasaki test.
//!
//! Split data lives in `g`-orthonormal coordinates at its base point.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::ad;
use crate::connection::{schouten_at, second_order_at};
use crate::error::{Error, Result};
use crate::holonomy::{detect_complex_structure, MatrixLieAlgebra};
use crate::linalg::{self, bracket, frob, OrthoFrame};
use crate::manifold::{point_geometry, ContactChart};
use crate::transport::{ortho_at, sample_curves, transport, SamplerConfig, TransportKind};

/// `Ric_{bc} = Σ_a (R(e_a, e_b) e_c)^a` in frame components.
pub fn transverse_ricci(chart: &ContactChart, x: &DVector<f64>) -> Result<DMatrix<f64>> {
    chart.check_domain(x)?;
    let so = second_order_at(chart, x)?;
    let r = chart.rank();
    Ok(DMatrix::from_fn(r, r, |b, c| (0..r).map(|a| so.curvature[a][b][(a, c)]).sum()))
}

/// `ρ(X, Y) = Ric(JX, Y)`, i.e. `J^T Ric`, for `J` compatible with `g`.
pub fn ricci_form_from(ric: &DMatrix<f64>, g: &DMatrix<f64>, j: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let defect = (j.transpose() * g * j - g).amax();
    if defect > 1e-7 * (1.0 + g.amax()) {
        return Err(Error::Precondition(format!("J is not g-orthogonal (defect {defect:e})")));
    }
    Ok(j.transpose() * ric)
}

/// Ricci form at `x` for a complex structure `j` given in frame components.
pub fn ricci_form(chart: &ContactChart, x: &DVector<f64>, j: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let ric = transverse_ricci(chart, x)?;
    ricci_form_from(&ric, &chart.metric(x), j)
}

/// One invariant summand with its complex structure (if it carries one).
#[derive(Debug, Clone)]
pub struct SplitBlock {
    /// Orthonormal columns spanning the block.
    pub basis: DMatrix<f64>,
    /// Complex structure of the block, extended by zero.
    pub j: Option<DMatrix<f64>>,
}

impl SplitBlock {
    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn projector(&self) -> DMatrix<f64> {
        &self.basis * self.basis.transpose()
    }
}

/// Orthogonal decomposition `D = D^0 ⊕ D^1 ⊕ ... ⊕ D^r` into holonomy-invariant parts.
#[derive(Debug, Clone)]
pub struct FactorSplit {
    pub n: usize,
    pub blocks: Vec<SplitBlock>,
    /// Orthonormal columns spanning the part annihilated by the algebra.
    pub trivial: DMatrix<f64>,
}

impl FactorSplit {
    pub fn dims(&self) -> Vec<usize> {
        self.blocks.iter().map(SplitBlock::dim).collect()
    }

    /// Frame index groups, when every block is spanned by coordinate axes.
    pub fn index_groups(&self, tol: f64) -> Option<Vec<Vec<usize>>> {
        let mut groups = Vec::new();
        for b in &self.blocks {
            let p = b.projector();
            let mut idx = Vec::new();
            for i in 0..self.n {
                let d = p[(i, i)];
                if (d - 1.0).abs() < tol {
                    idx.push(i);
                } else if d.abs() > tol {
                    return None;
                }
            }
            groups.push(idx);
        }
        Some(groups)
    }

    /// Image under an orthogonal map (e.g. a parallel transport).
    pub fn transported(&self, q: &DMatrix<f64>) -> FactorSplit {
        FactorSplit {
            n: self.n,
            blocks: self
                .blocks
                .iter()
                .map(|b| SplitBlock { basis: q * &b.basis, j: b.j.as_ref().map(|j| q * j * q.transpose()) })
                .collect(),
            trivial: q * &self.trivial,
        }
    }

    /// Largest off-block entry of any basis element of `h`.
    pub fn invariance_residual(&self, h: &MatrixLieAlgebra) -> f64 {
        let mut bases: Vec<&DMatrix<f64>> = self.blocks.iter().map(|b| &b.basis).collect();
        bases.push(&self.trivial);
        let mut worst = 0.0_f64;
        for a in &h.basis {
            for (i, u) in bases.iter().enumerate() {
                for (k, v) in bases.iter().enumerate() {
                    if i != k && u.ncols() > 0 && v.ncols() > 0 {
                        worst = worst.max((v.transpose() * a * *u).amax());
                    }
                }
            }
        }
        worst
    }

    /// Largest cross-block entry of the metric (identity here) and of `form`.
    pub fn orthogonality_residual(&self, form: &DMatrix<f64>) -> f64 {
        let mut worst = 0.0_f64;
        for (i, u) in self.blocks.iter().enumerate() {
            for (k, v) in self.blocks.iter().enumerate() {
                if i != k {
                    worst = worst.max((v.basis.transpose() * &u.basis).amax());
                    worst = worst.max((v.basis.transpose() * form * &u.basis).amax());
                }
            }
        }
        worst
    }

    pub fn complex_structures(&self) -> Result<Vec<DMatrix<f64>>> {
        self.blocks
            .iter()
            .enumerate()
            .map(|(i, b)| b.j.clone().ok_or_else(|| Error::Degenerate(format!("block {i} has no complex structure"))))
            .collect()
    }
}

fn symmetric_basis(n: usize) -> Vec<DMatrix<f64>> {
    let mut out = Vec::with_capacity(n * (n + 1) / 2);
    let s = std::f64::consts::FRAC_1_SQRT_2;
    for p in 0..n {
        for q in p..n {
            let mut m = DMatrix::zeros(n, n);
            if p == q {
                m[(p, p)] = 1.0;
            } else {
                m[(p, q)] = s;
                m[(q, p)] = s;
            }
            out.push(m);
        }
    }
    out
}

fn null_combinations(candidates: &[DMatrix<f64>], targets: &[DMatrix<f64>]) -> Vec<DMatrix<f64>> {
    if targets.is_empty() {
        return candidates.to_vec();
    }
    let n = candidates[0].nrows();
    let mut map = DMatrix::zeros(targets.len() * n * n, candidates.len());
    for (i, c) in candidates.iter().enumerate() {
        for (k, t) in targets.iter().enumerate() {
            map.view_mut((k * n * n, i), (n * n, 1)).copy_from_slice(bracket(c, t).as_slice());
        }
    }
    let ns = linalg::null_space(&map, 1e-6);
    (0..ns.ncols())
        .map(|j| candidates.iter().enumerate().fold(DMatrix::zeros(n, n), |acc, (i, c)| acc + c * ns[(i, j)]))
        .collect()
}

/// Relative eigenvalue gap separating blocks.
pub const BLOCK_GAP: f64 = 1e-6;

/// Split `D_x` into `h`-invariant summands; `omega_hat` (the orthonormal
/// matrix of `dθ` at the base point) fixes the sign of each block's `J`.
pub fn split_distribution(h: &MatrixLieAlgebra, omega_hat: &DMatrix<f64>, seed: u64) -> Result<FactorSplit> {
    let n = h.n;
    let trivial = if h.basis.is_empty() {
        DMatrix::identity(n, n)
    } else {
        let rows: Vec<DMatrix<f64>> = h.basis.clone();
        let mut stacked = DMatrix::zeros(n * rows.len(), n);
        for (k, b) in rows.iter().enumerate() {
            stacked.view_mut((k * n, 0), (n, n)).copy_from(b);
        }
        linalg::null_space(&stacked, 1e-6)
    };
    let d0 = trivial.ncols();
    if d0 == n {
        return Ok(FactorSplit { n, blocks: Vec::new(), trivial });
    }
    // orthonormal complement of the trivial part
    let comp = {
        let p0 = &trivial * trivial.transpose();
        let (vals, vecs) = linalg::sorted_symmetric_eigen(&(DMatrix::identity(n, n) - p0));
        let cols: Vec<DVector<f64>> = (0..n).filter(|&i| vals[i] > 0.5).map(|i| vecs.column(i).into_owned()).collect();
        DMatrix::from_columns(&cols)
    };
    let mut s = DMatrix::zeros(n, n);
    for b in &h.basis {
        s += b.transpose() * b;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for c in null_combinations(&symmetric_basis(n), &h.basis) {
        s += c * (2.0 * rng.random::<f64>() - 1.0);
    }
    let s_v = comp.transpose() * &s * &comp;
    let (vals, vecs) = linalg::sorted_symmetric_eigen(&s_v);
    let scale = 1.0 + vals.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let mut clusters: Vec<Vec<usize>> = Vec::new();
    for i in 0..vals.len() {
        match clusters.last_mut() {
            Some(c) if vals[i] - vals[*c.last().unwrap()] < BLOCK_GAP * scale => c.push(i),
            _ => clusters.push(vec![i]),
        }
    }
    let mut blocks: Vec<SplitBlock> = clusters
        .iter()
        .map(|c| {
            let cols: Vec<DVector<f64>> = c.iter().map(|&i| &comp * vecs.column(i)).collect();
            SplitBlock { basis: DMatrix::from_columns(&cols), j: None }
        })
        .collect();
    // deterministic order: by the first axis carrying a substantial share of the block
    let key = |b: &SplitBlock| {
        let p = b.projector();
        (0..n).find(|&i| p[(i, i)] > 0.25).unwrap_or(n)
    };
    blocks.sort_by_key(key);
    for (i, blk) in blocks.iter_mut().enumerate() {
        let u = &blk.basis;
        let restricted: Vec<DMatrix<f64>> = h.basis.iter().map(|b| u.transpose() * b * u).collect();
        let hb = MatrixLieAlgebra::span(u.ncols(), &restricted, h.residual_tol);
        if let Some(jb) = detect_complex_structure(&hb, seed.wrapping_add(i as u64 + 1)) {
            let mut j = u * jb * u.transpose();
            if frob(&j, omega_hat) < 0.0 {
                j = -j;
            }
            blk.j = Some(j);
        }
    }
    Ok(FactorSplit { n, blocks, trivial })
}

/// A split carried to a point by the adapted transport.
#[derive(Debug, Clone)]
pub struct SplitSample {
    pub x: DVector<f64>,
    pub split: FactorSplit,
}

/// The base point plus the endpoints of sampled arbitrary curves, each with
/// the split transported by the adapted connection.
pub fn transport_split(
    chart: &ContactChart,
    x: &DVector<f64>,
    split: &FactorSplit,
    cfg: &SamplerConfig,
) -> Result<Vec<SplitSample>> {
    let fx = ortho_at(chart, x)?;
    let mut out = vec![SplitSample { x: x.clone(), split: split.clone() }];
    let curves = sample_curves(chart, x, cfg, cfg.magnitude)?;
    let moved: Vec<SplitSample> = curves
        .par_iter()
        .map(|(_, c)| {
            let t = transport(chart, c, TransportKind::Adapted)?;
            let fy = ortho_at(chart, c.end())?;
            let q = &fy.lt * &t.tau * &fx.lt_inv;
            Ok(SplitSample { x: c.end().clone(), split: split.transported(&q) })
        })
        .collect::<Result<_>>()?;
    out.extend(moved);
    Ok(out)
}

/// Orthonormal `dθ` and `Ric` at a point.
fn orthonormal_forms(chart: &ContactChart, x: &DVector<f64>) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let f = ortho_at(chart, x)?;
    let so = second_order_at(chart, x)?;
    let r = chart.rank();
    let ric = DMatrix::from_fn(r, r, |b, c| (0..r).map(|a| so.curvature[a][b][(a, c)]).sum());
    Ok((f.form(&so.geo.omega), f.form(&ric)))
}

/// Per-block Ricci forms `ρ^i = (J^i)^T Ric P_i` in orthonormal coordinates.
fn block_ricci_forms(split: &FactorSplit, ric: &DMatrix<f64>) -> Result<Vec<DMatrix<f64>>> {
    let js = split.complex_structures()?;
    Ok(js.iter().zip(&split.blocks).map(|(j, b)| j.transpose() * ric * b.projector()).collect())
}

#[derive(Debug, Clone, Serialize)]
pub struct Regression {
    pub b: Vec<f64>,
    /// `max ‖dθ − Σ b_i ρ^i‖_F / ‖dθ‖_F` over the points.
    pub residual: f64,
    pub points: usize,
}

/// Coefficients of `t` along the blocks' complex structures, signed so the
/// largest is positive.
pub fn t_coefficients(t: &DMatrix<f64>, split: &FactorSplit) -> Result<Vec<f64>> {
    let js = split.complex_structures()?;
    let mut a: Vec<f64> = js.iter().map(|j| frob(t, j) / frob(j, j)).collect();
    let lead = a.iter().cloned().fold(0.0_f64, |m, v| if v.abs() > m.abs() { v } else { m });
    if lead < 0.0 {
        a.iter_mut().for_each(|v| *v = -*v);
    }
    Ok(a)
}

/// Minimum number of points for the regression.
pub const MIN_REGRESSION_POINTS: usize = 10;

/// Least-squares fit of `dθ = Σ b_i ρ^i` over all sample points at once.
pub fn dtheta_regression(chart: &ContactChart, samples: &[SplitSample]) -> Result<Regression> {
    if samples.len() < MIN_REGRESSION_POINTS {
        return Err(Error::Precondition(format!(
            "regression needs at least {MIN_REGRESSION_POINTS} points, got {}",
            samples.len()
        )));
    }
    let data: Vec<(DMatrix<f64>, Vec<DMatrix<f64>>)> = samples
        .par_iter()
        .map(|s| {
            let (omega, ric) = orthonormal_forms(chart, &s.x)?;
            Ok((omega, block_ricci_forms(&s.split, &ric)?))
        })
        .collect::<Result<_>>()?;
    let r = data[0].1.len();
    if r == 0 {
        return Err(Error::Degenerate("split has no blocks".into()));
    }
    let mut normal = DMatrix::zeros(r, r);
    let mut rhs = DVector::zeros(r);
    for (omega, rho) in &data {
        for i in 0..r {
            rhs[i] += frob(&rho[i], omega);
            for k in 0..r {
                normal[(i, k)] += frob(&rho[i], &rho[k]);
            }
        }
    }
    let omega_sq: f64 = data.iter().map(|(w, _)| w.norm_squared()).sum();
    if (0..r).any(|i| normal[(i, i)] <= 1e-12 * omega_sq) || linalg::rank(&normal, 1e-10) < r {
        return Err(Error::Degenerate("some Ricci form vanishes identically (Ricci-flat factor)".into()));
    }
    let b = normal
        .clone()
        .cholesky()
        .map(|c| c.solve(&rhs))
        .ok_or_else(|| Error::Degenerate("regression normal equations are singular".into()))?;
    let mut residual = 0.0_f64;
    for (omega, rho) in &data {
        let mut fit = omega.clone();
        for i in 0..r {
            fit -= &rho[i] * b[i];
        }
        residual = residual.max(fit.norm() / omega.norm());
    }
    Ok(Regression { b: b.iter().cloned().collect(), residual, points: samples.len() })
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct EinsteinFactor {
    pub lambda: f64,
    /// `max ‖Ric_i − λ g_i‖_F / ‖g_i‖_F` over the points.
    pub residual: f64,
}

/// Per-block Einstein constant (fitted over all points) and residual.
pub fn einstein_check(chart: &ContactChart, samples: &[SplitSample]) -> Result<Vec<EinsteinFactor>> {
    let rics: Vec<DMatrix<f64>> =
        samples.par_iter().map(|s| orthonormal_forms(chart, &s.x).map(|(_, ric)| ric)).collect::<Result<_>>()?;
    let nb = samples.first().map_or(0, |s| s.split.blocks.len());
    let mut out = Vec::with_capacity(nb);
    for i in 0..nb {
        let parts: Vec<(DMatrix<f64>, DMatrix<f64>)> = samples
            .iter()
            .zip(&rics)
            .map(|(s, ric)| {
                let p = s.split.blocks[i].projector();
                (&p * ric * &p, p)
            })
            .collect();
        let d = samples[0].split.blocks[i].dim() as f64;
        let lambda = parts.iter().map(|(r, _)| r.trace()).sum::<f64>() / (d * parts.len() as f64);
        let residual = parts.iter().map(|(r, p)| (r - p * lambda).norm() / p.norm()).fold(0.0, f64::max);
        out.push(EinsteinFactor { lambda, residual });
    }
    Ok(out)
}

/// `ψ = −G^{-1} ω`, so that `g(ψX, Y) = dθ(X, Y)` for column vectors.
pub fn psi_endomorphism<S: crate::ad::Scalar>(g_inv: &DMatrix<S>, omega: &DMatrix<S>) -> DMatrix<S> {
    -(g_inv * omega)
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct SasakiCheck {
    pub is_sasaki_candidate: bool,
    pub psi_sq_residual: f64,
    pub nabla_psi_residual: f64,
}

/// Threshold on both residuals for reporting a Sasaki candidate.
pub const SASAKI_TOL: f64 = 1e-6;

pub fn sasaki_psi_check(chart: &ContactChart, points: &[DVector<f64>]) -> Result<SasakiCheck> {
    let r = chart.rank();
    let per_point: Vec<(f64, f64)> = points
        .par_iter()
        .map(|x| {
            chart.check_domain(x)?;
            let (geo, gamma) = schouten_at(chart, x)?;
            let f = OrthoFrame::new(&geo.g).ok_or_else(|| Error::NotPositiveDefinite { point: x.iter().cloned().collect() })?;
            let psi = psi_endomorphism(&geo.g_inv, &geo.omega);
            let sq = (f.endo(&(&psi * &psi)) + DMatrix::<f64>::identity(r, r)).norm();
            let mut nabla = 0.0_f64;
            for (a, ga) in gamma.iter().enumerate() {
                let dir: DVector<f64> = geo.jet.frame.column(a).into_owned();
                let gd = point_geometry(chart, &ad::seed(x, &dir))?;
                let dpsi = psi_endomorphism(&gd.g_inv, &gd.omega).map(|z| z.d);
                let cov = dpsi + ga * &psi - &psi * ga;
                nabla = nabla.max(f.endo(&cov).norm());
            }
            Ok((sq, nabla))
        })
        .collect::<Result<_>>()?;
    let psi_sq_residual = per_point.iter().map(|p| p.0).fold(0.0, f64::max);
    let nabla_psi_residual = per_point.iter().map(|p| p.1).fold(0.0, f64::max);
    Ok(SasakiCheck {
        is_sasaki_candidate: psi_sq_residual < SASAKI_TOL && nabla_psi_residual < SASAKI_TOL,
        psi_sq_residual,
        nabla_psi_residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::holonomy::{holonomy_algebras, lie_closure, SPAN_TOL};
    use crate::manifold::{heisenberg, product_construction, standard_complex_structure, FactorSpec};

    fn discs(b1: f64, b2: f64) -> ContactChart {
        product_construction(&[FactorSpec::poincare_disc(b1), FactorSpec::poincare_disc(b2)]).unwrap()
    }

    fn analysis(ch: &ContactChart, seed: u64) -> (MatrixLieAlgebra, FactorSplit, Vec<SplitSample>) {
        let cfg = SamplerConfig { n_paths: 24, seed, ..Default::default() };
        let x = ch.origin();
        let h = holonomy_algebras(ch, &x, &cfg, SPAN_TOL).unwrap();
        let (omega, _) = orthonormal_forms(ch, &x).unwrap();
        let split = split_distribution(&h.adapted, &omega, seed).unwrap();
        let samples = transport_split(ch, &x, &split, &cfg).unwrap();
        (h.adapted, split, samples)
    }

    #[test]
    fn heisenberg_ricci_vanishes() {
        let ch = heisenberg(2).unwrap();
        for x in ch.random_points(5, 1) {
            assert!(transverse_ricci(&ch, &x).unwrap().amax() < 1e-12);
        }
    }

    #[test]
    fn disc_ricci_is_minus_curvature_times_g() {
        for c in [1.0, 2.5] {
            let spec = FactorSpec { curvature: c, ..FactorSpec::poincare_disc(1.0) };
            let ch = product_construction(&[spec, FactorSpec::poincare_disc(1.0)]).unwrap();
            for x in ch.random_points(10, 2) {
                let ric = transverse_ricci(&ch, &x).unwrap();
                let g = ch.metric(&x);
                let blk = ric.view((0, 0), (2, 2)) + g.view((0, 0), (2, 2)) * c;
                assert!(blk.amax() < 1e-8 * g.amax());
                assert!((&ric - ric.transpose()).amax() < 1e-8);
            }
        }
    }

    #[test]
    fn disc_ricci_form_is_minus_kaehler_form_and_flips_with_j() {
        let ch = discs(1.0, 1.0);
        let x = ch.random_points(1, 4).remove(0);
        let g = ch.metric(&x);
        let j = standard_complex_structure(4);
        let rho = ricci_form(&ch, &x, &j).unwrap();
        let kaehler = j.transpose() * &g;
        assert!((&rho + &kaehler).amax() < 1e-8 * g.amax());
        let flipped = ricci_form(&ch, &x, &(-&j)).unwrap();
        assert!((&rho + &flipped).amax() < 1e-12);
        let mut bad = j.clone();
        bad[(0, 1)] = -2.0;
        assert!(ricci_form(&ch, &x, &bad).is_err());
    }

    #[test]
    fn bergman_ball_is_kaehler_einstein() {
        let ch = product_construction(&[FactorSpec::bergman_ball(2, 1.0)]).unwrap();
        for x in ch.random_points(10, 6) {
            let ric = transverse_ricci(&ch, &x).unwrap();
            let g = ch.metric(&x);
            let lambda = (ric.trace()) / g.trace();
            assert!((ric - &g * lambda).norm() / g.norm() < 1e-8);
            assert!((lambda + 6.0).abs() < 1e-8, "lambda {lambda}");
        }
    }

    #[test]
    fn disc_split_and_regression() {
        let ch = discs(1.0, 2.0);
        let (h, split, samples) = analysis(&ch, 3);
        assert_eq!(split.dims(), vec![2, 2]);
        assert_eq!(split.trivial.ncols(), 0);
        assert_eq!(split.index_groups(1e-8).unwrap(), vec![vec![0, 1], vec![2, 3]]);
        assert!(split.invariance_residual(&h) < 1e-6);
        let (omega, _) = orthonormal_forms(&ch, &ch.origin()).unwrap();
        assert!(split.orthogonality_residual(&omega) < 1e-7);
        for j in split.complex_structures().unwrap() {
            assert!((&j * &j + split.blocks.iter().map(|b| b.projector()).find(|p| (p * &j - &j).amax() < 1e-9).unwrap()).amax() < 1e-8);
        }
        let reg = dtheta_regression(&ch, &samples).unwrap();
        assert!((reg.b[0] - 1.0).abs() < 1e-4 && (reg.b[1] - 2.0).abs() < 1e-4, "{reg:?}");
        assert!(reg.residual < 1e-5);
        for f in einstein_check(&ch, &samples).unwrap() {
            assert!((f.lambda + 1.0).abs() < 1e-6 && f.residual < 1e-5);
        }
    }

    #[test]
    fn bergman_regression_has_one_block() {
        let ch = product_construction(&[FactorSpec::bergman_ball(2, 1.5)]).unwrap();
        let (_, split, samples) = analysis(&ch, 5);
        assert_eq!(split.dims(), vec![4]);
        let reg = dtheta_regression(&ch, &samples).unwrap();
        assert!((reg.b[0] - 1.5).abs() < 1e-4 && reg.residual < 1e-5, "{reg:?}");
    }

    #[test]
    fn perturbed_factor_breaks_regression_and_einstein() {
        let ch = product_construction(&[FactorSpec::perturbed_disc(1.0, 0.3), FactorSpec::poincare_disc(1.0)]).unwrap();
        let (_, split, samples) = analysis(&ch, 7);
        assert_eq!(split.dims(), vec![2, 2]);
        let reg = dtheta_regression(&ch, &samples).unwrap();
        assert!(reg.residual > 1e-2, "{reg:?}");
        let e = einstein_check(&ch, &samples).unwrap();
        assert!(e[0].residual > 1e-2 && e[1].residual < 1e-5);
    }

    #[test]
    fn zero_algebra_is_all_trivial() {
        let split = split_distribution(&MatrixLieAlgebra::zero(4, SPAN_TOL), &DMatrix::zeros(4, 4), 0).unwrap();
        assert!(split.blocks.is_empty());
        assert_eq!(split.trivial.ncols(), 4);
    }

    #[test]
    fn regression_rejects_flat_factor_and_few_points() {
        let ch = heisenberg(2).unwrap();
        let j = standard_complex_structure(4);
        let split = FactorSplit {
            n: 4,
            blocks: vec![SplitBlock { basis: DMatrix::identity(4, 4), j: Some(j) }],
            trivial: DMatrix::zeros(4, 0),
        };
        let samples: Vec<SplitSample> =
            ch.random_points(12, 1).into_iter().map(|x| SplitSample { x, split: split.clone() }).collect();
        assert!(matches!(dtheta_regression(&ch, &samples), Err(Error::Degenerate(_))));
        assert!(matches!(dtheta_regression(&ch, &samples[..3]), Err(Error::Precondition(_))));
    }

    #[test]
    fn u2_gives_single_irreducible_block() {
        let h = lie_closure(4, &crate::holonomy::tests::u2_basis(), SPAN_TOL).unwrap();
        let split = split_distribution(&h, &standard_complex_structure(4), 2).unwrap();
        assert_eq!(split.dims(), vec![4]);
        assert!((split.blocks[0].j.as_ref().unwrap() - standard_complex_structure(4)).amax() < 1e-8);
    }

    #[test]
    fn sasaki_examples() {
        let hz = sasaki_psi_check(&heisenberg(2).unwrap(), &heisenberg(2).unwrap().random_points(5, 1)).unwrap();
        assert!(hz.is_sasaki_candidate && hz.psi_sq_residual < 1e-12 && hz.nabla_psi_residual < 1e-12);
        let d = discs(1.0, 1.0);
        let s = sasaki_psi_check(&d, &d.random_points(10, 2)).unwrap();
        assert!(s.is_sasaki_candidate, "{s:?}");
        let d2 = discs(1.0, 2.0);
        let s2 = sasaki_psi_check(&d2, &d2.random_points(10, 2)).unwrap();
        assert!(!s2.is_sasaki_candidate && s2.psi_sq_residual > 0.1);
        let tw = discs(1.0, 1.0).with_frame_twist(0.3);
        let st = sasaki_psi_check(&tw, &tw.random_points(10, 2)).unwrap();
        assert!(st.is_sasaki_candidate, "{st:?}");
    }

    /// Exterior derivative of a 2-form field on the base coordinates by central differences.
    fn d_of_two_form(f: &dyn Fn(&DVector<f64>) -> DMatrix<f64>, x: &DVector<f64>, k: usize) -> f64 {
        let h = 1e-4;
        let deriv = |a: usize| {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[a] += h;
            xm[a] -= h;
            (f(&xp) - f(&xm)) / (2.0 * h)
        };
        let ds: Vec<DMatrix<f64>> = (0..k).map(deriv).collect();
        let mut worst = 0.0_f64;
        for a in 0..k {
            for b in 0..k {
                for c in 0..k {
                    worst = worst.max((ds[a][(b, c)] + ds[b][(c, a)] + ds[c][(a, b)]).abs());
                }
            }
        }
        worst
    }

    #[test]
    fn ricci_forms_are_closed() {
        // on the built-ins e_a projects to ∂_a, so frame components are base coordinates
        for ch in [
            product_construction(&[FactorSpec::bergman_ball(2, 1.0)]).unwrap(),
            product_construction(&[FactorSpec::perturbed_disc(1.0, 0.3), FactorSpec::bergman_ball(2, 1.0)]).unwrap(),
        ] {
            let r = ch.rank();
            let j = standard_complex_structure(r);
            let rho = |x: &DVector<f64>| ricci_form(&ch, x, &j).unwrap();
            for x in ch.random_points(4, 8) {
                let d = d_of_two_form(&rho, &x, r) / (1.0 + rho(&x).amax());
                assert!(d < 1e-4, "{} {d:e}", ch.name());
            }
        }
    }
}
