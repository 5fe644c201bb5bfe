//! Schouten connection, its adapted and Wagner extensions, and their
//! curvatures, all in the horizontal frame of a chart.
//!
//! Connection coefficients are stored as one matrix per frame direction:
//! `gamma[a][(c, b)] = Γ^c_{ab}`, i.e. `∇_{e_a} e_b = Γ^c_{ab} e_c`, so that
//! `gamma[a]` acts on frame components like an endomorphism.
//!
//! Bivectors are skew coefficient matrices `β` standing for `Σ_{a,b} β^{ab} e_a∧e_b`
//! with `X∧Y = X⊗Y − Y⊗X`; a 2-form `P` evaluates as `P(X∧Y) = 2P(X, Y)`, hence
//! `P(β) = 2 Σ_{a,b} β^{ab} P(e_a, e_b)`. Under this pairing `dθ(ω^{-1}) = −4m`.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::ad::{self, Dual, Scalar};
use crate::error::{Error, Result};
use crate::linalg;
use crate::manifold::{point_geometry, ContactChart, PointGeometry};

/// Curvature as `r[a][b] = R(e_a, e_b)` (endomorphism matrices).
pub type Curvature<S> = Vec<Vec<DMatrix<S>>>;

/// Schouten coefficients from the Koszul formula.
pub fn schouten_from_geometry<S: Scalar>(geo: &PointGeometry<S>) -> Vec<DMatrix<S>> {
    let r = geo.g.nrows();
    let g = &geo.g;
    let c = &geo.sf.c;
    // cl(a, b, k) = g(π[e_a, e_b], e_k)
    let mut cl = vec![S::zero(); r * r * r];
    let idx = |a: usize, b: usize, k: usize| (a * r + b) * r + k;
    for a in 0..r {
        for b in 0..r {
            for k in 0..r {
                let mut acc = S::zero();
                for (d, cd) in c.iter().enumerate() {
                    acc += cd[(a, b)] * g[(d, k)];
                }
                cl[idx(a, b, k)] = acc;
            }
        }
    }
    let half = S::from_f64(0.5);
    let mut gamma = vec![DMatrix::zeros(r, r); r];
    for a in 0..r {
        let mut lowered = DMatrix::zeros(r, r); // (k, b) -> g(∇_a e_b, e_k)
        for b in 0..r {
            for k in 0..r {
                let v = geo.dg[a][(b, k)] + geo.dg[b][(k, a)] - geo.dg[k][(a, b)] + cl[idx(a, b, k)]
                    - cl[idx(b, k, a)]
                    - cl[idx(a, k, b)];
                lowered[(k, b)] = v * half;
            }
        }
        gamma[a] = &geo.g_inv * lowered;
    }
    gamma
}

pub fn schouten_at<S: Scalar>(chart: &ContactChart, x: &DVector<S>) -> Result<(PointGeometry<S>, Vec<DMatrix<S>>)> {
    let geo = point_geometry(chart, x)?;
    let gamma = schouten_from_geometry(&geo);
    Ok((geo, gamma))
}

/// Schouten coefficients at a point.
pub fn schouten_coeffs(chart: &ContactChart, x: &DVector<f64>) -> Result<Vec<DMatrix<f64>>> {
    chart.check_domain(x)?;
    Ok(schouten_at(chart, x)?.1)
}

/// First-order data plus Schouten coefficients and their frame derivatives.
#[derive(Debug, Clone)]
pub struct SecondOrder<S: Scalar> {
    pub geo: PointGeometry<S>,
    pub gamma: Vec<DMatrix<S>>,
    /// `dgamma[a][b] = e_a(Γ_b)`.
    pub dgamma: Vec<Vec<DMatrix<S>>>,
    pub curvature: Curvature<S>,
}

/// Schouten curvature
/// `R(X,Y)Z = ∇_X∇_Y Z − ∇_Y∇_X Z − ∇_{π[X,Y]} Z − π[π'[X,Y], Z]`, where
/// `π'[e_a, e_b] = τ_{ab} ξ` makes the last term `τ_{ab} [ξ, Z]_D`.
pub fn second_order_at<S: Scalar>(chart: &ContactChart, x: &DVector<S>) -> Result<SecondOrder<S>> {
    let (geo, gamma) = schouten_at(chart, x)?;
    let r = chart.rank();
    let mut dgamma = Vec::with_capacity(r);
    for a in 0..r {
        let dir: DVector<S> = geo.jet.frame.column(a).into_owned();
        let xd: DVector<Dual<S>> = ad::seed(x, &dir);
        let (_, gd) = schouten_at(chart, &xd)?;
        dgamma.push(gd.iter().map(|m| m.map(|z| z.d)).collect::<Vec<_>>());
    }
    let mut curvature = vec![vec![DMatrix::zeros(r, r); r]; r];
    for a in 0..r {
        for b in (a + 1)..r {
            let mut m = &dgamma[a][b] - &dgamma[b][a] + &gamma[a] * &gamma[b] - &gamma[b] * &gamma[a];
            for (d, cd) in geo.sf.c.iter().enumerate() {
                m -= &gamma[d] * cd[(a, b)];
            }
            m -= &geo.sf.d * geo.sf.tau[(a, b)];
            curvature[b][a] = -m.clone();
            curvature[a][b] = m;
        }
    }
    Ok(SecondOrder { geo, gamma, dgamma, curvature })
}

pub fn schouten_curvature(chart: &ContactChart, x: &DVector<f64>) -> Result<Curvature<f64>> {
    chart.check_domain(x)?;
    Ok(second_order_at(chart, x)?.curvature)
}

/// `P(β) = 2 Σ_{a,b} β^{ab} P(e_a, e_b)` for a matrix-valued 2-form.
pub fn curvature_on_bivector<S: Scalar>(curv: &Curvature<S>, beta: &DMatrix<S>) -> DMatrix<S> {
    let r = curv.len();
    let mut out = DMatrix::zeros(r, r);
    for a in 0..r {
        for b in 0..r {
            if a != b {
                out += &curv[a][b] * (beta[(a, b)] + beta[(a, b)]);
            }
        }
    }
    out
}

/// Scalar 2-form on a bivector with the same doubling convention.
pub fn form_on_bivector<S: Scalar>(form: &DMatrix<S>, beta: &DMatrix<S>) -> S {
    let mut acc = S::zero();
    for (p, q) in form.iter().zip(beta.iter()) {
        acc += *p * *q;
    }
    acc + acc
}

/// Bivector whose coefficient matrix is the inverse of the matrix of `dθ`.
pub fn dtheta_inverse_from_omega<S: Scalar>(omega: &DMatrix<S>) -> Result<DMatrix<S>> {
    linalg::inverse(omega).ok_or_else(|| Error::Degenerate("dθ is degenerate on D".into()))
}

pub fn dtheta_inverse_bivector(chart: &ContactChart, x: &DVector<f64>) -> Result<DMatrix<f64>> {
    let omega = crate::manifold::d_theta_frame(chart, x)?;
    dtheta_inverse_from_omega(&omega)
}

/// `N = R((dθ)^{-1}) / 4m`.
pub fn wagner_n_from<S: Scalar>(curv: &Curvature<S>, omega: &DMatrix<S>) -> Result<DMatrix<S>> {
    let m = omega.nrows() / 2;
    let alpha = dtheta_inverse_from_omega(omega)?;
    Ok(curvature_on_bivector(curv, &alpha).map(|z| z.scale(1.0 / (4 * m) as f64)))
}

pub fn wagner_n_at<S: Scalar>(chart: &ContactChart, x: &DVector<S>) -> Result<DMatrix<S>> {
    let so = second_order_at(chart, x)?;
    wagner_n_from(&so.curvature, &so.geo.omega)
}

pub fn wagner_n(chart: &ContactChart, x: &DVector<f64>) -> Result<DMatrix<f64>> {
    chart.check_domain(x)?;
    wagner_n_at(chart, x)
}

/// Which extension of the horizontal connection to the whole tangent bundle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Extension {
    /// `N = 0` (the adapted connection of a K-contact structure).
    Adapted,
    /// `N = R((dθ)^{-1}) / 4m`.
    Wagner,
}

/// Curvature of an extended connection: `R^N(e_a, e_b) = R(e_a, e_b) + ω_{ab} N`
/// and, in the K-contact case, `R^N(ξ, e_a) = −∇_{e_a} N`.
#[derive(Debug, Clone)]
pub struct ExtendedCurvature {
    pub n: DMatrix<f64>,
    pub horizontal: Curvature<f64>,
    pub vertical: Vec<DMatrix<f64>>,
}

pub fn extended_curvature(chart: &ContactChart, x: &DVector<f64>, ext: Extension) -> Result<ExtendedCurvature> {
    chart.check_domain(x)?;
    let so = second_order_at(chart, x)?;
    let r = chart.rank();
    match ext {
        Extension::Adapted => Ok(ExtendedCurvature {
            n: DMatrix::zeros(r, r),
            horizontal: so.curvature,
            vertical: vec![DMatrix::zeros(r, r); r],
        }),
        Extension::Wagner => {
            let n = wagner_n_from(&so.curvature, &so.geo.omega)?;
            let horizontal = add_omega_n(&so.curvature, &so.geo.omega, &n);
            let mut vertical = Vec::with_capacity(r);
            for a in 0..r {
                let dir: DVector<f64> = so.geo.jet.frame.column(a).into_owned();
                let xd = ad::seed(x, &dir);
                let nd = wagner_n_at(chart, &xd)?;
                let dn = nd.map(|z| z.d);
                let cov = dn + &so.gamma[a] * &n - &n * &so.gamma[a];
                vertical.push(-cov);
            }
            Ok(ExtendedCurvature { n, horizontal, vertical })
        }
    }
}

/// `R(e_a, e_b) + ω_{ab} N`.
pub fn add_omega_n(curv: &Curvature<f64>, omega: &DMatrix<f64>, n: &DMatrix<f64>) -> Curvature<f64> {
    curv.iter()
        .enumerate()
        .map(|(a, row)| row.iter().enumerate().map(|(b, m)| m + n * omega[(a, b)]).collect())
        .collect()
}

/// Everything at one point, in the chart's horizontal frame.
#[derive(Debug, Clone)]
pub struct FramePointData {
    pub x: DVector<f64>,
    pub g: DMatrix<f64>,
    pub omega: DMatrix<f64>,
    pub gamma: Vec<DMatrix<f64>>,
    /// Matrix of `∇^0_ξ = [ξ, ·]_D` on frame components.
    pub xi_coeffs: DMatrix<f64>,
    pub r: Curvature<f64>,
    pub n: DMatrix<f64>,
    pub rw: Curvature<f64>,
    pub rw_xi: Vec<DMatrix<f64>>,
}

pub fn frame_point_data(chart: &ContactChart, x: &DVector<f64>) -> Result<FramePointData> {
    chart.check_domain(x)?;
    let so = second_order_at(chart, x)?;
    let ext = extended_curvature(chart, x, Extension::Wagner)?;
    Ok(FramePointData {
        x: x.clone(),
        g: so.geo.g.clone(),
        omega: so.geo.omega.clone(),
        gamma: so.gamma,
        xi_coeffs: so.geo.sf.d.clone(),
        r: so.curvature,
        n: ext.n,
        rw: ext.horizontal,
        rw_xi: ext.vertical,
    })
}

/// Residuals of the defining identities at one point (max-abs norms).
#[derive(Debug, Clone, Default, Serialize)]
pub struct ConnectionResiduals {
    pub torsion: f64,
    pub metric_compatibility: f64,
    pub curvature_g_skew: f64,
    pub bianchi: f64,
    /// `|dθ((dθ)^{-1}) + 4m|`.
    pub dtheta_pairing: f64,
    /// `‖R^W((dθ)^{-1})‖_F`.
    pub wagner: f64,
}

pub fn connection_residuals(chart: &ContactChart, x: &DVector<f64>) -> Result<ConnectionResiduals> {
    chart.check_domain(x)?;
    let so = second_order_at(chart, x)?;
    let r = chart.rank();
    let m = chart.m();
    let geo = &so.geo;
    let mut torsion = 0.0_f64;
    let mut metric = 0.0_f64;
    for a in 0..r {
        for b in 0..r {
            for k in 0..r {
                let t = so.gamma[a][(k, b)] - so.gamma[b][(k, a)] - geo.sf.c[k][(a, b)];
                torsion = torsion.max(t.abs());
            }
        }
        let mc = &geo.dg[a] - so.gamma[a].transpose() * &geo.g - &geo.g * &so.gamma[a];
        metric = metric.max(mc.amax());
    }
    let mut skew = 0.0_f64;
    for a in 0..r {
        for b in 0..r {
            let ra = &so.curvature[a][b];
            skew = skew.max((&geo.g * ra + ra.transpose() * &geo.g).amax());
        }
    }
    let mut bianchi = 0.0_f64;
    for a in 0..r {
        for b in 0..r {
            for c in 0..r {
                let s = so.curvature[a][b].column(c) + so.curvature[b][c].column(a) + so.curvature[c][a].column(b);
                bianchi = bianchi.max(s.amax());
            }
        }
    }
    let alpha = dtheta_inverse_from_omega(&geo.omega)?;
    let pairing = form_on_bivector(&geo.omega, &alpha);
    let n = wagner_n_from(&so.curvature, &geo.omega)?;
    let rw = add_omega_n(&so.curvature, &geo.omega, &n);
    let wagner = curvature_on_bivector(&rw, &alpha).norm();
    Ok(ConnectionResiduals {
        torsion,
        metric_compatibility: metric,
        curvature_g_skew: skew,
        bianchi,
        dtheta_pairing: (pairing + 4.0 * m as f64).abs(),
        wagner,
    })
}
