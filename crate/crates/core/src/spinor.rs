//! The complex spin representation of so(2m) on `Δ ≅ ⊕_k Λ^k ℂ^m`.
//!
//! Fock basis: index bits are occupation numbers of `m` fermionic modes, mode
//! `j` pairing frame directions `2j` and `2j+1`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::holonomy::MatrixLieAlgebra;
use crate::linalg;
use crate::manifold::standard_complex_structure;

pub type CMatrix = DMatrix<Complex64>;

/// Largest supported `m` (spinor dimension 256).
pub const MAX_M: usize = 8;

/// `σ(J_std)` acts on level `k` as `LIFT_J_CONSTANT · (m − 2k) i`.
pub const LIFT_J_CONSTANT: f64 = -0.5;

#[derive(Debug, Clone)]
pub struct SpinRep {
    pub m: usize,
    /// `γ_0, …, γ_{2m−1}` with `γ_p γ_q + γ_q γ_p = −2 δ_pq`.
    pub gamma: Vec<CMatrix>,
}

fn creation(m: usize, j: usize) -> CMatrix {
    let n = 1 << m;
    let mut a = CMatrix::zeros(n, n);
    for s in 0..n {
        if s & (1 << j) == 0 {
            let sign = if (s & ((1 << j) - 1)).count_ones().is_multiple_of(2) { 1.0 } else { -1.0 };
            a[(s | (1 << j), s)] = Complex64::new(sign, 0.0);
        }
    }
    a
}

pub fn build_spin_rep(m: usize) -> Result<SpinRep> {
    if m == 0 || m > MAX_M {
        return Err(Error::InvalidConfig(format!("spinor rank m = {m} outside 1..={MAX_M}")));
    }
    let i = Complex64::i();
    let mut gamma = Vec::with_capacity(2 * m);
    for j in 0..m {
        let up = creation(m, j);
        let down = up.adjoint();
        gamma.push((&down + &up) * i);
        gamma.push(&down - &up);
    }
    Ok(SpinRep { m, gamma })
}

impl SpinRep {
    pub fn dim(&self) -> usize {
        1 << self.m
    }

    /// Level `k` (total occupation) of a basis index.
    pub fn level(&self, index: usize) -> usize {
        index.count_ones() as usize
    }

    /// Occupations per group of modes; `blocks` are frame index ranges of even length.
    pub fn occupations(&self, index: usize, blocks: &[std::ops::Range<usize>]) -> Vec<usize> {
        blocks
            .iter()
            .map(|r| (r.start / 2..r.end / 2).filter(|&j| index & (1 << j) != 0).count())
            .collect()
    }

    /// `max ‖γ_p γ_q + γ_q γ_p + 2 δ_pq‖`.
    pub fn clifford_residual(&self) -> f64 {
        let id = CMatrix::identity(self.dim(), self.dim());
        let mut worst = 0.0_f64;
        for (p, a) in self.gamma.iter().enumerate() {
            for (q, b) in self.gamma.iter().enumerate() {
                let mut s = a * b + b * a;
                if p == q {
                    s += &id * Complex64::new(2.0, 0.0);
                }
                worst = worst.max(s.iter().map(|z| z.norm()).fold(0.0, f64::max));
            }
        }
        worst
    }

    /// Clifford multiplication by `v = Σ v_p e_p`.
    pub fn clifford(&self, v: &[f64]) -> CMatrix {
        let n = self.dim();
        self.gamma.iter().zip(v).fold(CMatrix::zeros(n, n), |acc, (g, &c)| acc + g * Complex64::new(c, 0.0))
    }
}

/// `σ(A) = −¼ Σ_{p,q} A_pq γ_p γ_q`, the lift with `[σ(A), γ(v)] = γ(Av)`.
pub fn spin_lift(rep: &SpinRep, a: &DMatrix<f64>) -> Result<CMatrix> {
    let n2 = 2 * rep.m;
    if a.nrows() != n2 || a.ncols() != n2 {
        return Err(Error::Precondition(format!("expected a {n2}x{n2} matrix")));
    }
    if linalg::skew_defect(a) > 1e-9 * (1.0 + a.norm()) {
        return Err(Error::Precondition("spin lift needs a skew matrix".into()));
    }
    let d = rep.dim();
    let mut out = CMatrix::zeros(d, d);
    for p in 0..n2 {
        for q in 0..n2 {
            if p != q && a[(p, q)] != 0.0 {
                out += &rep.gamma[p] * &rep.gamma[q] * Complex64::new(-0.25 * a[(p, q)], 0.0);
            }
        }
    }
    Ok(out)
}

/// Relative singular-value threshold for the common kernel.
pub const KERNEL_TOL: f64 = 1e-8;

/// `dim ∩_i ker σ(B_i)` over a basis of `h`.
pub fn parallel_spinor_dim(rep: &SpinRep, h: &MatrixLieAlgebra) -> Result<usize> {
    let d = rep.dim();
    if h.basis.is_empty() {
        return Ok(d);
    }
    let mut stacked = CMatrix::zeros(d * h.basis.len(), d);
    for (k, b) in h.basis.iter().enumerate() {
        stacked.view_mut((k * d, 0), (d, d)).copy_from(&spin_lift(rep, b)?);
    }
    let sv = stacked.svd(false, false).singular_values;
    let smax = sv.iter().cloned().fold(0.0, f64::max);
    if smax == 0.0 {
        return Ok(d);
    }
    Ok(d - sv.iter().filter(|&&s| s > KERNEL_TOL * smax).count())
}

#[derive(Debug, Clone, Serialize)]
pub struct RatioCondition {
    pub satisfiable: bool,
    /// Occupations `(k_1, …, k_r)` with `k_i ∈ {0, m_i}` giving equal ratios.
    pub witnesses: Vec<Vec<usize>>,
    /// `1 / a_i`, the ratio `(m_i − 2k_i)/(m_i a_i)` at `k_i = 0`.
    pub ratios: Vec<f64>,
}

/// Whether `(m_i − 2k_i)/(m_i a_i)` can be made equal for all `i` with `k_i ∈ {0, m_i}`.
pub fn ratio_condition(m_list: &[usize], a_list: &[f64]) -> Result<RatioCondition> {
    if m_list.len() != a_list.len() || m_list.is_empty() {
        return Err(Error::Precondition("need matching, nonempty m and a lists".into()));
    }
    if m_list.contains(&0) || a_list.iter().any(|a| *a == 0.0 || !a.is_finite()) {
        return Err(Error::Precondition("ratio condition needs m_i ≥ 1 and a_i ≠ 0".into()));
    }
    let r = m_list.len();
    let mut witnesses = Vec::new();
    for mask in 0..(1usize << r) {
        let ks: Vec<usize> = (0..r).map(|i| if mask & (1 << i) != 0 { m_list[i] } else { 0 }).collect();
        let vals: Vec<f64> = (0..r)
            .map(|i| (m_list[i] as f64 - 2.0 * ks[i] as f64) / (m_list[i] as f64 * a_list[i]))
            .collect();
        let scale = vals.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        if vals.iter().all(|v| (v - vals[0]).abs() <= 1e-9 * scale) {
            witnesses.push(ks);
        }
    }
    Ok(RatioCondition {
        satisfiable: !witnesses.is_empty(),
        witnesses,
        ratios: a_list.iter().map(|a| 1.0 / a).collect(),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct LevelEigenvalue {
    pub index: usize,
    pub level: usize,
    pub eigenvalue_im: f64,
}

/// Residuals of the lift on random skew matrices and the spectrum of `σ(J)`.
#[derive(Debug, Clone, Serialize)]
pub struct LiftChecks {
    pub homomorphism_residual: f64,
    pub equivariance_residual: f64,
    /// `σ(J)` on level `k` equals `lift_j_constant · (m − 2k) i`.
    pub lift_j_constant: f64,
    pub lift_j_proportionality_residual: f64,
    pub j_levels: Vec<LevelEigenvalue>,
}

fn cmax(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn lift_checks(rep: &SpinRep, samples: usize, seed: u64) -> Result<LiftChecks> {
    let (m, n) = (rep.m, 2 * rep.m);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let skew = |rng: &mut ChaCha8Rng| {
        let a = DMatrix::from_fn(n, n, |_, _| 2.0 * rng.random::<f64>() - 1.0);
        &a - a.transpose()
    };
    let (mut hom, mut equi) = (0.0_f64, 0.0_f64);
    for _ in 0..samples {
        let (a, b) = (skew(&mut rng), skew(&mut rng));
        let (sa, sb) = (spin_lift(rep, &a)?, spin_lift(rep, &b)?);
        let lhs = spin_lift(rep, &linalg::bracket(&a, &b))?;
        hom = hom.max(cmax(&(lhs - (&sa * &sb - &sb * &sa))));
        let v = DVector::from_fn(n, |_, _| 2.0 * rng.random::<f64>() - 1.0);
        let av: Vec<f64> = (&a * &v).iter().cloned().collect();
        let g = rep.clifford(v.as_slice());
        equi = equi.max(cmax(&(&sa * &g - &g * &sa - rep.clifford(&av))));
    }
    let sj = spin_lift(rep, &standard_complex_structure(n))?;
    let j_levels: Vec<LevelEigenvalue> = (0..rep.dim())
        .map(|i| LevelEigenvalue { index: i, level: rep.level(i), eigenvalue_im: sj[(i, i)].im })
        .collect();
    let lift_j_constant = j_levels[0].eigenvalue_im / m as f64;
    let mut prop = 0.0_f64;
    for (i, l) in j_levels.iter().enumerate() {
        prop = prop.max((l.eigenvalue_im - lift_j_constant * (m as f64 - 2.0 * l.level as f64)).abs());
        prop = prop.max(sj[(i, i)].re.abs());
        for k in (0..rep.dim()).filter(|&k| k != i) {
            prop = prop.max(sj[(i, k)].norm());
        }
    }
    Ok(LiftChecks {
        homomorphism_residual: hom,
        equivariance_residual: equi,
        lift_j_constant,
        lift_j_proportionality_residual: prop,
        j_levels,
    })
}
