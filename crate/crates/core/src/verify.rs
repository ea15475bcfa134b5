//! The full identity suite for one configuration, and the anomaly reports
//! (norm closed-form ratios, H-matrix prefactor).

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{sym_eig, Mat2, DEFAULT_EIG_TOL};
use crate::matpoly::{monic_rw, monic_rw_gegenbauer, recursion_matrices, NormRatio, Params, PolyFamily};
use crate::operators::{
    corollary_residual, diff_formula_matrices, diff_formula_residual, diff_formula_residual_with,
    dtilde_from_d, DiffMatrices, eigen_relation_residual, op_d, orthonormal_diff_residual, symmetry_residuals, Corollary,
    FreeParams, SymmetryReport, Weight,
};
use crate::quadrature::{Domain, WeightedQuadrature};
use crate::scalar::{idx, lit, Scalar};
use crate::timeband::{CoeffVec, TbConfig, TimeBand};

/// Points per axis for grid-based checks.
pub const GRID: usize = 32;
/// Points per axis for the kernel identity.
pub const KERNEL_GRID: usize = 12;
/// Largest degree in the norm ratio table.
pub const NORM_TABLE_DEGREE: usize = 20;

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub residual: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl Check {
    pub fn new(name: &str, residual: f64, tolerance: f64) -> Self {
        Self {
            name: name.to_string(),
            residual,
            tolerance,
            // NaN never passes.
            pass: residual <= tolerance,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct VerifyReport {
    pub checks: Vec<Check>,
}

impl VerifyReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn failed(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.pass)
    }

    pub fn get(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

fn f<T: Scalar>(v: T) -> f64 {
    v.to_f64().unwrap_or(f64::NAN)
}

/// Uniform interior grid of [a, b].
pub fn grid<T: Scalar>(a: T, b: T, points: usize) -> Vec<T> {
    (0..points)
        .map(|i| a + (b - a) * (idx::<T>(i) + lit(0.5)) / idx(points))
        .collect()
}

/// max over w, m ≤ max_degree of ‖⟨Q_w, Q_m⟩ − δ I‖_F on [−1, 1].
pub fn orthonormality_residual<T: Scalar>(family: &PolyFamily<T>) -> Result<f64> {
    let quad = WeightedQuadrature::new(*family.params());
    let top = family.max_degree();
    let vals = quad.integrate(Domain::Full, 2 * top + 2, 1, |x, w| {
        let q: Vec<Mat2<T>> = (0..=top).map(|k| family.orthonormal_value(k, x).unwrap_or_else(|_| Mat2::zero())).collect();
        let mut out = Vec::with_capacity(4 * (top + 1) * (top + 1));
        for a in &q {
            let aw = *a * *w;
            for b in &q {
                out.extend((aw * b.transpose()).entries());
            }
        }
        out
    })?;
    let mut worst = 0.0f64;
    for i in 0..=top {
        for j in 0..=top {
            let k = 4 * (i * (top + 1) + j);
            let g = Mat2::new(vals[k], vals[k + 1], vals[k + 2], vals[k + 3]);
            let target = if i == j { Mat2::identity() } else { Mat2::zero() };
            worst = worst.max(f((g - target).frobenius()));
        }
    }
    Ok(worst)
}

/// Relative coefficient gap between the explicit and Gegenbauer constructions of R_w.
pub fn dual_route_residual<T: Scalar>(w: usize, params: &Params<T>) -> Result<T> {
    let a = monic_rw(w, params);
    let b = monic_rw_gegenbauer(w, params)?;
    Ok(a.sub(&b).coeff_norm() / a.coeff_norm())
}

/// Worst of the three equation residuals and two boundary limits; a boundary
/// sequence that does not decay monotonically counts as infinite.
fn symmetry_check(rep: &SymmetryReport) -> f64 {
    if rep.left.monotone && rep.right.monotone {
        rep.max_equation_residual().max(rep.left.limit).max(rep.right.limit)
    } else {
        f64::INFINITY
    }
}

/// Runs every identity for `config` at tolerance `tol`.
pub fn run_suite<T: Scalar>(config: &TbConfig<T>, tol: f64) -> Result<VerifyReport> {
    let params = config.params;
    let big_n = config.big_n;
    let tb = TimeBand::new(*config)?;
    let fam = tb.family();
    let mut checks = Vec::new();
    let mut push = |name: &str, residual: f64| checks.push(Check::new(name, residual, tol));

    push("orthonormality", orthonormality_residual(fam)?);

    let xs: Vec<T> = grid(-T::one(), T::one(), GRID);
    let ys: Vec<T> = grid(-T::one(), T::one(), GRID).into_iter().rev().collect();
    let (mut rec, mut orec, mut cd) = (0.0f64, 0.0f64, 0.0f64);
    for w in 0..=big_n {
        for (&x, &y) in xs.iter().zip(&ys) {
            rec = rec.max(f(fam.recursion_residual(w, x)?));
            orec = orec.max(f(fam.orthonormal_recursion_residual(w, x)?));
            if w >= 1 {
                cd = cd.max(f(fam.christoffel_darboux_residual(w, x, y)?));
            }
        }
    }
    push("monic_recursion", rec);
    push("orthonormal_recursion", orec);
    push("christoffel_darboux", cd);

    let worst = |g: &dyn Fn(usize) -> Result<f64>| -> Result<f64> {
        (0..=big_n).try_fold(0.0f64, |acc, w| Ok(acc.max(g(w)?)))
    };
    push("dual_route_rw", worst(&|w| Ok(f(dual_route_residual(w, &params)?)))?);
    push("eigen_relation", worst(&|w| Ok(f(eigen_relation_residual(w, &params))))?);
    push(
        "differentiation_formula",
        worst(&|w| Ok(f(diff_formula_residual(w, &params, &FreeParams::commuting_choice(w, &params))?)))?,
    );
    push(
        "orthonormal_differentiation_formula",
        worst(&|w| Ok(f(orthonormal_diff_residual(w, fam, &FreeParams::commuting_choice(w, &params))?)))?,
    );
    push(
        "corollary_diagonal",
        worst(&|w| Ok(f(corollary_residual(w, &params, Corollary::Diagonal)?)))?,
    );
    if !params.asymmetry().is_zero() {
        push(
            "corollary_antidiagonal",
            worst(&|w| Ok(f(corollary_residual(w, &params, Corollary::Antidiagonal)?)))?,
        );
    }
    let alpha = config.alpha.min(T::one() - T::epsilon());
    push(
        "dtilde_decomposition",
        f(tb.dtilde().distance(&dtilde_from_d(&params, big_n, alpha)?)),
    );

    let weight = Weight::new(params);
    let sym_d = symmetry_residuals(&op_d(&params), &weight, -T::one(), T::one(), 4 * GRID)?;
    push("symmetry_d_full_interval", symmetry_check(&sym_d));
    let sym_dt = symmetry_residuals(tb.dtilde(), &weight, -T::one(), alpha, 4 * GRID)?;
    push("symmetry_dtilde_cap", symmetry_check(&sym_dt));

    let kg: Vec<T> = (0..KERNEL_GRID)
        .map(|i| -T::one() + idx::<T>(2 * i) / idx(KERNEL_GRID - 1))
        .collect();
    let mut kernel = 0.0f64;
    for &x in &kg {
        for &y in &kg {
            let k = f(tb.kernel_eval(x, y)?.frobenius());
            kernel = kernel.max(f(tb.kernel_identity_residual(x, y)?) / (1.0 + k));
        }
    }
    push("kernel_identity", kernel);

    let (_, structure) = tb.b()?;
    push("b_span_invariance", structure.coupling);
    push("b_tridiagonal", structure.off_band);
    push("b_symmetric", structure.asymmetry);
    push("commutator", tb.commutator_residual()?);

    let m_eig = sym_eig(tb.m()?, lit(DEFAULT_EIG_TOL))?;
    let lo = f(m_eig.values[0]);
    let hi = f(m_eig.values[m_eig.values.len() - 1]);
    push("gram_spectrum_in_unit_interval", (-lo).max(hi - 1.0).max(0.0));

    let c = CoeffVec::new((0..config.dim()).map(|i| lit::<T>((i as f64 + 1.0).cos())).collect())?;
    push("apply_s_dual_route", f(tb.apply_s(&c)?.sub(&tb.apply_s_direct(&c)?).norm()));

    match tb.prolate_spectrum() {
        Ok(spectrum) => {
            push("shared_eigenvectors", spectrum.max_cross_residual());
            let outside = spectrum
                .modes
                .iter()
                .fold(0.0f64, |acc, m| acc.max(-m.s_eig).max(m.s_eig - 1.0));
            push("rayleigh_values_in_unit_interval", outside);
        }
        // An asymmetric B has no orthogonal eigenbasis; both checks fail.
        Err(Error::NotSymmetric { .. }) => {
            push("shared_eigenvectors", f64::INFINITY);
            push("rayleigh_values_in_unit_interval", f64::INFINITY);
        }
        Err(e) => return Err(e),
    }

    Ok(VerifyReport { checks })
}

/// Quadrature/closed-form norm ratios with a verdict on w-independence.
#[derive(Clone, Debug, Serialize)]
pub struct NormRatioReport {
    pub rows: Vec<NormRatio>,
    /// max ratio / min ratio over the table, per diagonal entry.
    pub spread: [f64; 2],
    pub w_independent: bool,
}

/// H-matrix of the differentiation formula: residual with the consistent
/// prefactor (n + 2w + 1) A_w against the variant (2n + 2w + 1) A_w.
#[derive(Clone, Debug, Serialize)]
pub struct HPrefactorRow {
    pub w: usize,
    pub residual_n_2w_1: f64,
    pub residual_2n_2w_1: f64,
    /// ‖H_w − (n + 2w + 1) A_w‖ for the H-matrix derived from the free-parameter formulas.
    pub derived_gap: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct Anomalies {
    pub norm_ratios: NormRatioReport,
    pub h_prefactor: Vec<HPrefactorRow>,
}

pub fn norm_ratio_report<T: Scalar>(params: &Params<T>) -> Result<NormRatioReport> {
    let rows = PolyFamily::new(*params, NORM_TABLE_DEGREE)?.norm_ratio_table();
    let mut spread = [0.0; 2];
    for (k, s) in spread.iter_mut().enumerate() {
        let (lo, hi) = rows
            .iter()
            .fold((f64::INFINITY, 0.0f64), |(lo, hi), r| (lo.min(r.ratio[k]), hi.max(r.ratio[k])));
        *s = hi / lo;
    }
    Ok(NormRatioReport {
        w_independent: spread.iter().all(|&s| (s - 1.0).abs() < 1e-8),
        spread,
        rows,
    })
}

pub fn h_prefactor_table<T: Scalar>(params: &Params<T>, max_w: usize) -> Result<Vec<HPrefactorRow>> {
    (1..=max_w)
        .map(|w| {
            let fp = FreeParams::commuting_choice(w, params);
            let m = diff_formula_matrices(w, params, &fp)?;
            let (a, _) = recursion_matrices(w, params);
            let wt = idx::<T>(w);
            let n = params.n();
            let one = T::one();
            let consistent = a.scale(n + wt + wt + one);
            let variant = a.scale(n + wt + wt + n + one);
            Ok(HPrefactorRow {
                w,
                residual_n_2w_1: f(diff_formula_residual_with(w, params, &DiffMatrices { h: consistent, ..m })),
                residual_2n_2w_1: f(diff_formula_residual_with(w, params, &DiffMatrices { h: variant, ..m })),
                derived_gap: f((m.h - consistent).max_abs()),
            })
        })
        .collect()
}

pub fn anomalies<T: Scalar>(params: &Params<T>) -> Result<Anomalies> {
    Ok(Anomalies {
        norm_ratios: norm_ratio_report(params)?,
        h_prefactor: h_prefactor_table(params, 12)?,
    })
}

/// Error kinds a caller should treat as bad input rather than a failed check.
pub fn is_parameter_error(e: &Error) -> bool {
    matches!(e, Error::InvalidParams(_) | Error::Domain(_) | Error::SingularParameter { .. })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_suite_passes() {
        let cfg = TbConfig::new(Params::new(4.0, 1.0).unwrap(), 6, 0.3).unwrap();
        let rep = run_suite(&cfg, 1e-9).unwrap();
        let failed: Vec<_> = rep.failed().collect();
        assert!(failed.is_empty(), "{failed:?}");
        assert!(rep.get("commutator").is_some());
    }

    #[test]
    fn mutation_fails_commutator() {
        let cfg = TbConfig::new(Params::new(4.0, 1.0).unwrap(), 6, 0.3)
            .unwrap()
            .with_mutation(crate::operators::Mutation::DropE0);
        let rep = run_suite(&cfg, 1e-9).unwrap();
        assert!(!rep.get("commutator").unwrap().pass);
    }

    #[test]
    fn nan_residual_fails() {
        assert!(!Check::new("x", f64::NAN, 1.0).pass);
    }

    #[test]
    fn h_prefactor_distinguishes_variants() {
        let rows = h_prefactor_table(&Params::new(4.0, 1.0).unwrap(), 6).unwrap();
        for r in rows {
            assert!(r.residual_n_2w_1 < 1e-12 && r.residual_2n_2w_1 > 1e-3 && r.derived_gap < 1e-12, "{r:?}");
        }
    }

    #[test]
    fn norm_ratio_first_entry() {
        let rep = norm_ratio_report(&Params::new(4.0, 1.0).unwrap()).unwrap();
        assert_eq!(rep.rows.len(), NORM_TABLE_DEGREE + 1);
        assert!((rep.rows[0].ratio[0] - 25.0).abs() < 1e-10);
    }
}
