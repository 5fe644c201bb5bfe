//! Commands behind the `kcontact` binary and their JSON reports.

use std::io;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::ser::Serialize;
use serde::Serialize as DeriveSerialize;
use serde_json::ser::{Formatter, PrettyFormatter};

use crate::config::{builtin_manifolds, ManifoldConfig, RunConfig};
use crate::connection::{connection_residuals, ConnectionResiduals};
use crate::error::{Error, Result};
use crate::holonomy::{
    center_decomposition, compare_subalgebras, holonomy_algebras, mutual_containment, special_unitary_algebra,
    t_complement, unitary_algebra, Comparison, MatrixLieAlgebra,
};

use crate::manifold::{chart_residuals, ChartResiduals, ContactChart};
use crate::spinor::{build_spin_rep, lift_checks, parallel_spinor_dim, ratio_condition, LiftChecks, RatioCondition, MAX_M};
use crate::transport::{
    balanced_loop, horizontalize, ortho_at, sample_curves, transport, transport_equivalence_check, transport_theta,
    TransportKind,
};
use crate::transverse::{
    dtheta_regression, einstein_check, sasaki_psi_check, split_distribution, t_coefficients, transport_split, EinsteinFactor,
    FactorSplit, Regression, SasakiCheck,
};

pub const SCHEMA: u32 = 1;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VERIFY_FAILED: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_DOMAIN: i32 = 3;
pub const EXIT_SAMPLING: i32 = 4;

/// Process exit code for an error.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::InvalidConfig(_) | Error::Json(_) | Error::Io(_) => EXIT_CONFIG,
        Error::OutsideDomain { .. } | Error::DomainExit { .. } | Error::NotPositiveDefinite { .. } => EXIT_DOMAIN,
        Error::Sampling(_) => EXIT_SAMPLING,
        _ => EXIT_VERIFY_FAILED,
    }
}

/// Pretty JSON with every float written with 17 significant digits.
struct Sig17<'a>(PrettyFormatter<'a>);

impl Formatter for Sig17<'_> {
    fn write_f64<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        write!(w, "{value:.16e}")
    }
    fn write_f32<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f32) -> io::Result<()> {
        write!(w, "{:.16e}", value as f64)
    }
    fn begin_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }
    fn end_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }
    fn begin_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }
    fn end_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }
    fn begin_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }
    fn end_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }
    fn begin_object_key<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }
    fn begin_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }
    fn end_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, Sig17(PrettyFormatter::new()));
    value.serialize(&mut ser)?;
    buf.push(b'\n');
    Ok(String::from_utf8(buf).expect("serde_json writes UTF-8"))
}

#[derive(Debug, Clone, DeriveSerialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    /// `"<"` or `">"`: how `value` must compare with `tolerance`.
    pub comparison: &'static str,
    pub tolerance: f64,
    pub passed: bool,
}

impl Check {
    fn below(name: &str, value: f64, tolerance: f64) -> Self {
        Check { name: name.into(), value, comparison: "<", tolerance, passed: value < tolerance }
    }
    fn above(name: &str, value: f64, tolerance: f64) -> Self {
        Check { name: name.into(), value, comparison: ">", tolerance, passed: value > tolerance }
    }
}

#[derive(Debug, Clone, DeriveSerialize)]
pub struct VerifyReport {
    pub schema: u32,
    pub command: &'static str,
    pub manifold: String,
    pub passed: bool,
    pub checks: Vec<Check>,
}

fn max_by<T>(items: &[T], f: impl Fn(&T) -> f64) -> f64 {
    items.iter().map(f).fold(0.0, f64::max)
}

fn min_by<T>(items: &[T], f: impl Fn(&T) -> f64) -> f64 {
    items.iter().map(f).fold(f64::INFINITY, f64::min)
}

/// Pointwise invariants, transport invariants and the loop equivalence.
pub fn cmd_verify(cfg: &RunConfig) -> Result<VerifyReport> {
    let (chart, x0) = cfg.chart_and_base()?;
    let seed = cfg.sampler.seed;
    let points = chart.random_points(cfg.verify.points, seed);
    let res: Vec<(ChartResiduals, ConnectionResiduals)> = points
        .par_iter()
        .map(|x| Ok((chart_residuals(&chart, x)?, connection_residuals(&chart, x)?)))
        .collect::<Result<_>>()?;
    let ode = cfg.tolerances.ode_tol;
    let mut checks = vec![
        Check::below("reeb_normalization", max_by(&res, |r| r.0.reeb_normalization), 1e-9),
        Check::below("frame_horizontal", max_by(&res, |r| r.0.frame_horizontal), 1e-9),
        Check::above("metric_min_eigenvalue", min_by(&res, |r| r.0.metric_min_eigenvalue), 0.0),
        Check::above("dtheta_nondegenerate", min_by(&res, |r| r.0.omega_abs_det), 0.0),
        Check::below("reeb_contraction", max_by(&res, |r| r.0.reeb_contraction), 1e-6),
        Check::below("k_contact", max_by(&res, |r| r.0.k_contact), 1e-6),
        Check::below("bracket_theta", max_by(&res, |r| r.0.tau_plus_omega), 1e-9),
        Check::below("torsion", max_by(&res, |r| r.1.torsion), 1e-6),
        Check::below("metric_compatibility", max_by(&res, |r| r.1.metric_compatibility), 1e-6),
        Check::below("curvature_g_skew", max_by(&res, |r| r.1.curvature_g_skew), 1e-6),
        Check::below("bianchi", max_by(&res, |r| r.1.bianchi), 1e-6),
        Check::below("dtheta_pairing", max_by(&res, |r| r.1.dtheta_pairing), 1e-9),
        Check::below("wagner_condition", max_by(&res, |r| r.1.wagner), 1e-6),
    ];

    let sampler = crate::transport::SamplerConfig { n_paths: cfg.verify.curves, ..cfg.sampler };
    let horizontal = sample_curves(&chart, &x0, &sampler, 0.0)?;
    let free = sample_curves(&chart, &x0, &sampler, sampler.magnitude.max(0.5))?;
    let hres: Vec<(f64, f64)> = horizontal
        .par_iter()
        .map(|(_, c)| {
            let s = transport(&chart, c, TransportKind::Schouten)?;
            let a = transport(&chart, c, TransportKind::Adapted)?;
            let w = transport(&chart, c, TransportKind::Wagner)?;
            let agree = (&s.tau - &a.tau).norm().max((&s.tau - &w.tau).norm());
            Ok((s.isometry_defect.max(a.isometry_defect).max(w.isometry_defect), agree))
        })
        .collect::<Result<_>>()?;
    let fres: Vec<(f64, f64, f64, f64)> = free
        .par_iter()
        .map(|(_, c)| {
            let a = transport(&chart, c, TransportKind::Adapted)?;
            let w = transport(&chart, c, TransportKind::Wagner)?;
            let th = transport_theta(&chart, c);
            let tilde = horizontalize(&chart, c)?;
            Ok((
                a.isometry_defect.max(w.isometry_defect),
                th.relative_error(),
                th.factor.min(th.factor_ode),
                tilde.max_theta_speed(&chart),
            ))
        })
        .collect::<Result<_>>()?;
    let loops: Vec<f64> = (0..cfg.verify.loops)
        .into_par_iter()
        .map(|i| {
            let (_, mu) = balanced_loop(&chart, &x0, 4, 0.4, 0.5, cfg.sampler.step, seed.wrapping_add(i as u64))?;
            Ok(transport_equivalence_check(&chart, &mu)?.residual)
        })
        .collect::<Result<_>>()?;
    let mut isometry = max_by(&hres, |r| r.0);
    isometry = isometry.max(max_by(&fres, |r| r.0));
    checks.extend([
        Check::below("transport_isometry", isometry, 1e-6),
        Check::below("horizontal_kinds_agree", max_by(&hres, |r| r.1), 1e-6),
        Check::below("theta_transport_relative", max_by(&fres, |r| r.1), ode),
        Check::above("theta_factor_positive", min_by(&fres, |r| r.2), 0.0),
        Check::below("horizontalization", max_by(&fres, |r| r.3), 1e-6),
        Check::below("transport_equivalence", max_by(&loops, |r| *r), 1e-4),
    ]);
    Ok(VerifyReport {
        schema: SCHEMA,
        command: "verify",
        manifold: chart.name(),
        passed: checks.iter().all(|c| c.passed),
        checks,
    })
}

#[derive(Debug, Clone, DeriveSerialize)]
pub struct Dims {
    pub horizontal: usize,
    pub adapted: usize,
    pub horizontal_selector: usize,
}

#[derive(Debug, Clone, DeriveSerialize)]
pub struct TDirection {
    /// Coefficients of the unit generator of `t` in the blocks' complex structures.
    pub coefficients: Vec<f64>,
    /// Flags coefficients below `1e-6` of the largest one.
    pub near_zero: Vec<bool>,
    pub center_residual: f64,
    pub reconstruction_residual: f64,
}

#[derive(Debug, Clone, DeriveSerialize)]
pub struct SplitReport {
    pub block_dims: Vec<usize>,
    pub index_groups: Option<Vec<Vec<usize>>>,
    pub trivial_dim: usize,
    pub has_complex_structure: Vec<bool>,
    pub invariance_residual: f64,
    pub orthogonality_residual: f64,
}

#[derive(Debug, Clone, DeriveSerialize)]
pub struct SpinorKernels {
    pub horizontal: usize,
    pub adapted: usize,
    pub ratio_condition: Option<RatioCondition>,
}

#[derive(Debug, Clone, DeriveSerialize)]
pub struct HolonomyReport {
    pub schema: u32,
    pub command: &'static str,
    pub manifold: String,
    pub base_point: Vec<f64>,
    pub seed: u64,
    pub n_paths: usize,
    pub span_tol: f64,
    pub dims: Dims,
    pub comparison: Comparison,
    pub selector_agreement: f64,
    pub center_dim: usize,
    pub semisimple_dim: usize,
    pub t: Option<TDirection>,
    pub split: SplitReport,
    pub regression: Option<Regression>,
    pub regression_error: Option<String>,
    pub einstein: Vec<EinsteinFactor>,
    pub sasaki: SasakiCheck,
    pub spinor: Option<SpinorKernels>,
}

/// Everything the holonomy report needs, kept for programmatic use.
#[derive(Debug, Clone)]
pub struct HolonomyAnalysis {
    pub horizontal: MatrixLieAlgebra,
    pub horizontal_selector: MatrixLieAlgebra,
    pub adapted: MatrixLieAlgebra,
    pub split: FactorSplit,
    pub t: Option<DMatrix<f64>>,
    pub report: HolonomyReport,
}

pub fn analyze_holonomy(chart: &ContactChart, x: &DVector<f64>, cfg: &RunConfig) -> Result<HolonomyAnalysis> {
    let tol = cfg.tolerances.span_tol;
    let sampler = cfg.sampler;
    let h = holonomy_algebras(chart, x, &sampler, tol)?;
    let comparison = compare_subalgebras(&h.horizontal, &h.adapted, 1e-4)?;
    let (semisimple, center) = center_decomposition(&h.adapted);
    let fx = ortho_at(chart, x)?;
    let omega_hat = fx.form(&crate::manifold::d_theta_frame(chart, x)?);
    let split = split_distribution(&h.adapted, &omega_hat, sampler.seed)?;

    let tc = if comparison.codim == 1 { Some(t_complement(&h.adapted, &h.horizontal)?) } else { None };
    let t_dir = tc.as_ref().and_then(|tc| {
        t_coefficients(&tc.t, &split).ok().map(|coefficients| {
            let lead = coefficients.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
            TDirection {
                near_zero: coefficients.iter().map(|v| v.abs() < 1e-6 * lead).collect(),
                coefficients,
                center_residual: tc.center_residual,
                reconstruction_residual: tc.reconstruction_residual,
            }
        })
    });

    let (regression, regression_error, einstein) = if split.blocks.is_empty() {
        (None, Some("no nontrivial invariant blocks".to_string()), Vec::new())
    } else {
        let samples = transport_split(chart, x, &split, &sampler)?;
        let einstein = einstein_check(chart, &samples)?;
        match dtheta_regression(chart, &samples) {
            Ok(r) => (Some(r), None, einstein),
            Err(e @ (Error::Degenerate(_) | Error::Precondition(_))) => (None, Some(e.to_string()), einstein),
            Err(e) => return Err(e),
        }
    };
    let sasaki = sasaki_psi_check(chart, &chart.random_points(20, sampler.seed))?;

    let spinor = if chart.m() <= MAX_M {
        let rep = build_spin_rep(chart.m())?;
        let ratio = match &t_dir {
            Some(t) if !t.near_zero.iter().any(|&z| z) => {
                let ms: Vec<usize> = split.dims().iter().map(|d| d / 2).collect();
                Some(ratio_condition(&ms, &t.coefficients)?)
            }
            _ => None,
        };
        Some(SpinorKernels {
            horizontal: parallel_spinor_dim(&rep, &h.horizontal)?,
            adapted: parallel_spinor_dim(&rep, &h.adapted)?,
            ratio_condition: ratio,
        })
    } else {
        None
    };

    let report = HolonomyReport {
        schema: SCHEMA,
        command: "holonomy",
        manifold: chart.name(),
        base_point: x.iter().cloned().collect(),
        seed: sampler.seed,
        n_paths: sampler.n_paths,
        span_tol: tol,
        dims: Dims {
            horizontal: h.horizontal.dim(),
            adapted: h.adapted.dim(),
            horizontal_selector: h.horizontal_selector.dim(),
        },
        comparison,
        selector_agreement: mutual_containment(&h.horizontal, &h.horizontal_selector),
        center_dim: center.dim(),
        semisimple_dim: semisimple.dim(),
        t: t_dir,
        split: SplitReport {
            block_dims: split.dims(),
            index_groups: split.index_groups(1e-6),
            trivial_dim: split.trivial.ncols(),
            has_complex_structure: split.blocks.iter().map(|b| b.j.is_some()).collect(),
            invariance_residual: split.invariance_residual(&h.adapted),
            orthogonality_residual: split.orthogonality_residual(&omega_hat),
        },
        regression,
        regression_error,
        einstein,
        sasaki,
        spinor,
    };
    Ok(HolonomyAnalysis {
        horizontal: h.horizontal,
        horizontal_selector: h.horizontal_selector,
        adapted: h.adapted,
        split,
        t: tc.map(|t| t.t),
        report,
    })
}

pub fn cmd_holonomy(cfg: &RunConfig) -> Result<HolonomyReport> {
    let (chart, x) = cfg.chart_and_base()?;
    Ok(analyze_holonomy(&chart, &x, cfg)?.report)
}

#[derive(Debug, Clone, DeriveSerialize)]
pub struct StandardKernels {
    pub zero: usize,
    pub special_unitary: usize,
    pub unitary: usize,
}

#[derive(Debug, Clone, DeriveSerialize)]
pub struct SpinorReport {
    pub schema: u32,
    pub command: &'static str,
    pub m: usize,
    pub dim: usize,
    pub clifford_residual: f64,
    #[serde(flatten)]
    pub lift: LiftChecks,
    pub kernels: StandardKernels,
}

pub fn cmd_spinor(cfg: &RunConfig) -> Result<SpinorReport> {
    let chart = cfg.manifold.build()?;
    spinor_report(chart.m(), cfg.sampler.seed)
}

pub fn spinor_report(m: usize, seed: u64) -> Result<SpinorReport> {
    let rep = build_spin_rep(m)?;
    let n = 2 * m;
    Ok(SpinorReport {
        schema: SCHEMA,
        command: "spinor",
        m,
        dim: rep.dim(),
        clifford_residual: rep.clifford_residual(),
        lift: lift_checks(&rep, 20, seed)?,
        kernels: StandardKernels {
            zero: parallel_spinor_dim(&rep, &MatrixLieAlgebra::zero(n, 1e-6))?,
            special_unitary: parallel_spinor_dim(&rep, &special_unitary_algebra(m))?,
            unitary: parallel_spinor_dim(&rep, &unitary_algebra(m))?,
        },
    })
}

#[derive(Debug, Clone, DeriveSerialize)]
pub struct ManifoldEntry {
    pub name: &'static str,
    pub description: String,
    pub dim: usize,
    pub config: ManifoldConfig,
}

#[derive(Debug, Clone, DeriveSerialize)]
pub struct ListReport {
    pub schema: u32,
    pub command: &'static str,
    pub manifolds: Vec<ManifoldEntry>,
}

pub fn list_manifolds() -> Result<ListReport> {
    let manifolds = builtin_manifolds()
        .into_iter()
        .map(|(name, config)| {
            let chart = config.build()?;
            Ok(ManifoldEntry { name, description: chart.name(), dim: chart.dim(), config })
        })
        .collect::<Result<_>>()?;
    Ok(ListReport { schema: SCHEMA, command: "list-manifolds", manifolds })
}
