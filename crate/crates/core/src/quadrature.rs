//! Gauss–Jacobi rules built by Golub–Welsch, and the matrix inner products
//! ⟨f, g⟩ = ∫ f W g* over [−1, 1] or the cap [−1, α].
//!
//! On the full interval both endpoint factors (1 ± x)^{n/2−1} of the weight
//! are absorbed into the rule, so every polynomial integrand is integrated
//! exactly. On [−1, α] only (1 + x)^{n/2−1} is absorbed; the factor
//! (1 − x)^{n/2−1} stays in the integrand, which is still polynomial when
//! n is even and otherwise needs node doubling until convergence.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use crate::error::{Error, Result};
use crate::linalg::{sym_eig, Mat2, SquareMat};
use crate::matpoly::{MatPoly, Params};
use crate::operators::weight_poly;
use crate::scalar::{idx, lit, Scalar};

/// Maximum number of order doublings in adaptive mode.
pub const MAX_DOUBLINGS: usize = 6;

/// Relative change between successive doublings accepted as converged.
pub const CONVERGENCE_TOL: f64 = 1e-12;

/// Smallest starting order used by the adaptive path.
pub const BASE_ORDER: usize = 40;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Exactness {
    /// Exact for polynomials up to this degree against the absorbed factor.
    Degree(usize),
    /// Order chosen by doubling until successive values agree.
    Adaptive,
}

/// Nodes and weights of a Gauss rule for (x − a)^{left_exp} (b − x)^{right_exp} on (a, b).
#[derive(Clone, Debug)]
pub struct QuadRule<T> {
    pub nodes: Vec<T>,
    pub weights: Vec<T>,
    pub interval: (T, T),
    pub exact_degree: Exactness,
    pub left_exp: T,
    pub right_exp: T,
}

impl<T: Scalar> QuadRule<T> {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Σ ωᵢ f(xᵢ).
    pub fn integrate(&self, f: impl Fn(T) -> T) -> T {
        self.nodes
            .iter()
            .zip(&self.weights)
            .fold(T::zero(), |acc, (&x, &w)| acc + w * f(x))
    }
}

/// Value and derivative of the degree-m orthonormal polynomial defined by the
/// Jacobi matrix entries, plus the sum of squares of degrees 0..m (with
/// p_0 = 1, so the Christoffel number is its reciprocal times the mass).
fn orthonormal_sweep<T: Scalar>(diag: &[T], offd: &[T], t: T) -> (T, T, T) {
    let m = diag.len();
    let (mut p_prev, mut p) = (T::zero(), T::one());
    let (mut d_prev, mut d) = (T::zero(), T::zero());
    let mut sum_sq = T::zero();
    for k in 0..m {
        sum_sq = sum_sq + p * p;
        let b_prev = if k == 0 { T::zero() } else { offd[k - 1] };
        let b_k = if k + 1 < m { offd[k] } else { T::one() };
        let p_next = ((t - diag[k]) * p - b_prev * p_prev) / b_k;
        let d_next = (p + (t - diag[k]) * d - b_prev * d_prev) / b_k;
        (p_prev, p) = (p, p_next);
        (d_prev, d) = (d, d_next);
    }
    (p, d, sum_sq)
}

/// m-point Gauss–Jacobi rule on (a, b) via Golub–Welsch.
pub fn gauss_rule<T: Scalar>(
    m: usize,
    left_exp: T,
    right_exp: T,
    a: T,
    b: T,
) -> Result<QuadRule<T>> {
    if m == 0 {
        return Err(Error::InvalidParams("quadrature order must be at least 1".into()));
    }
    if !(a < b) {
        return Err(Error::InvalidParams(format!("empty interval ({a}, {b})")));
    }
    if !(left_exp > -T::one() && right_exp > -T::one()) {
        return Err(Error::InvalidParams(format!(
            "Jacobi exponents must exceed -1, got {left_exp}, {right_exp}"
        )));
    }
    // Reference weight (1 − t)^alpha (1 + t)^beta on [−1, 1].
    let (alpha, beta) = (right_exp, left_exp);
    let one = T::one();
    let two = idx::<T>(2);
    let ab = alpha + beta;
    let mut jac = SquareMat::zeros(m);
    for k in 0..m {
        let kt = idx::<T>(k);
        jac[(k, k)] = if k == 0 {
            (beta - alpha) / (ab + two)
        } else {
            let s = two * kt + ab;
            (beta * beta - alpha * alpha) / (s * (s + two))
        };
        if k + 1 < m {
            let j = kt + one;
            let s = two * j + ab;
            let beta_k = if k == 0 {
                lit::<T>(4.0) * (one + alpha) * (one + beta) / ((two + ab) * (two + ab) * (lit::<T>(3.0) + ab))
            } else {
                lit::<T>(4.0) * j * (j + alpha) * (j + beta) * (j + ab)
                    / (s * s * (s + one) * (s - one))
            };
            let off = beta_k.sqrt();
            jac[(k, k + 1)] = off;
            jac[(k + 1, k)] = off;
        }
    }
    let mu0 = two.powf(ab + one) * (alpha + one).gamma() * (beta + one).gamma() / (ab + two).gamma();
    let eig = sym_eig(&jac, lit(crate::linalg::DEFAULT_EIG_TOL))?;
    // Eigenvector weights lose relative accuracy as m grows; polish each node
    // by Newton on the orthonormal recurrence and take Christoffel numbers.
    let diag: Vec<T> = (0..m).map(|k| jac[(k, k)]).collect();
    let offd: Vec<T> = (0..m.saturating_sub(1)).map(|k| jac[(k, k + 1)]).collect();
    let polished: Vec<(T, T)> = eig
        .values
        .iter()
        .map(|&t0| {
            let mut t = t0;
            for _ in 0..3 {
                let (p, dp, _) = orthonormal_sweep(&diag, &offd, t);
                if dp == T::zero() {
                    break;
                }
                let step = p / dp;
                t = t - step;
                if step.abs() <= T::epsilon() * t.abs().max(one) {
                    break;
                }
            }
            let (_, _, sum_sq) = orthonormal_sweep(&diag, &offd, t);
            (t, one / sum_sq)
        })
        .collect();
    let half = (b - a) / two;
    let scale = half.powf(ab + one);
    let nodes = polished.iter().map(|&(t, _)| a + half * (t + one)).collect();
    let weights = polished.iter().map(|&(_, c)| mu0 * c * scale).collect();
    Ok(QuadRule {
        nodes,
        weights,
        interval: (a, b),
        exact_degree: Exactness::Degree(2 * m - 1),
        left_exp,
        right_exp,
    })
}

/// Integration domain for the matrix inner product.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Domain<T> {
    /// [−1, 1].
    Full,
    /// The cap [−1, α] with −1 < α < 1.
    Cap(T),
}

impl<T: Scalar> Domain<T> {
    /// α ≥ 1 coincides with the full interval.
    pub fn from_alpha(alpha: T) -> Result<Self> {
        if alpha >= T::one() {
            Ok(Domain::Full)
        } else if alpha > -T::one() {
            Ok(Domain::Cap(alpha))
        } else {
            Err(Error::Domain(format!("alpha = {alpha}")))
        }
    }

    pub fn upper(&self) -> T {
        match self {
            Domain::Full => T::one(),
            Domain::Cap(a) => *a,
        }
    }
}

fn is_nonneg_integer<T: Scalar>(v: T) -> bool {
    v >= T::zero() && v == v.round()
}

/// Weighted integration for one parameter set, with a rule cache.
///
/// The cache is keyed by (order, upper endpoint) and guarded by a mutex, so
/// results are identical whether or not a rule was cached.
#[derive(Debug)]
pub struct WeightedQuadrature<T> {
    params: Params<T>,
    weight: MatPoly<T>,
    cache: Mutex<HashMap<(usize, u64), Arc<QuadRule<T>>>>,
}

impl<T: Scalar> WeightedQuadrature<T> {
    pub fn new(params: Params<T>) -> Self {
        Self {
            params,
            weight: weight_poly(&params),
            cache: Mutex::new(HashMap::new()),
        }
    }

    pub fn params(&self) -> &Params<T> {
        &self.params
    }

    /// The Gauss rule absorbing the weight's endpoint powers on `domain`.
    pub fn rule(&self, domain: Domain<T>, order: usize) -> Result<Arc<QuadRule<T>>> {
        let key = (order, domain.upper().to_f64().unwrap_or(f64::NAN).to_bits());
        if let Some(r) = self.cache.lock().expect("rule cache poisoned").get(&key) {
            return Ok(Arc::clone(r));
        }
        let m = self.params.weight_exponent();
        let rule = match domain {
            Domain::Full => gauss_rule(order, m, m, -T::one(), T::one())?,
            Domain::Cap(alpha) => gauss_rule(order, m, T::zero(), -T::one(), alpha)?,
        };
        let rule = Arc::new(rule);
        self.cache
            .lock()
            .expect("rule cache poisoned")
            .insert(key, Arc::clone(&rule));
        Ok(rule)
    }

    /// The part of W(x) not absorbed by the rule on `domain`.
    pub fn effective_weight(&self, domain: Domain<T>, x: T) -> Mat2<T> {
        let p = self.weight.eval(x);
        match domain {
            Domain::Full => p,
            Domain::Cap(_) => p.scale((T::one() - x).powf(self.params.weight_exponent())),
        }
    }

    /// Whether integrands of polynomial degree are integrated exactly on `domain`.
    pub fn is_exact(&self, domain: Domain<T>) -> bool {
        matches!(domain, Domain::Full) || is_nonneg_integer(self.params.weight_exponent())
    }

    /// Integrates a vector-valued integrand `f(x, W_eff(x))` against the rule.
    ///
    /// `poly_degree` is the polynomial degree of the integrand including the
    /// quadratic weight matrix; in the exact regime the order is chosen so the
    /// rule integrates it exactly (never below `min_order`). Otherwise the
    /// order doubles from `max(min_order, BASE_ORDER)` until the max entry
    /// change relative to the max entry magnitude is below
    /// [`CONVERGENCE_TOL`].
    pub fn integrate<F>(&self, domain: Domain<T>, poly_degree: usize, min_order: usize, f: F) -> Result<Vec<T>>
    where
        F: Fn(T, &Mat2<T>) -> Vec<T>,
    {
        let run = |order: usize| -> Result<Vec<T>> {
            let rule = self.rule(domain, order)?;
            let mut acc: Vec<T> = Vec::new();
            for (&x, &omega) in rule.nodes.iter().zip(&rule.weights) {
                let vals = f(x, &self.effective_weight(domain, x));
                if acc.is_empty() {
                    acc = vec![T::zero(); vals.len()];
                }
                for (a, v) in acc.iter_mut().zip(vals) {
                    *a = *a + omega * v;
                }
            }
            Ok(acc)
        };
        if self.is_exact(domain) {
            let extra = match domain {
                Domain::Full => 0,
                Domain::Cap(_) => self.params.weight_exponent().to_usize().unwrap_or(0),
            };
            let order = ((poly_degree + extra) / 2 + 1).max(min_order).max(1);
            return run(order);
        }
        let mut order = min_order.max(BASE_ORDER);
        let mut prev = run(order)?;
        let mut before = prev.clone();
        for _ in 0..MAX_DOUBLINGS {
            order *= 2;
            let cur = run(order)?;
            let scale = cur.iter().fold(T::zero(), |acc, v| acc.max(v.abs()));
            let diff = cur
                .iter()
                .zip(&prev)
                .fold(T::zero(), |acc, (a, b)| acc.max((*a - *b).abs()));
            if diff <= lit::<T>(CONVERGENCE_TOL) * scale || scale.is_zero() {
                return Ok(cur);
            }
            before = std::mem::replace(&mut prev, cur);
        }
        let worst = |v: &[T]| v.iter().fold(T::zero(), |acc, x| acc.max(x.abs()));
        Err(Error::QuadratureNoConvergence {
            doublings: MAX_DOUBLINGS,
            previous: worst(&before).to_f64().unwrap_or(f64::NAN),
            last: worst(&prev).to_f64().unwrap_or(f64::NAN),
        })
    }

    /// ⟨f, g⟩ = ∫ f W g* over `domain`.
    pub fn inner_product(&self, f: &MatPoly<T>, g: &MatPoly<T>, domain: Domain<T>, min_order: Option<usize>) -> Result<Mat2<T>> {
        let deg = (f.degree().max(0) + g.degree().max(0)) as usize + 2;
        let v = self.integrate(domain, deg, min_order.unwrap_or(1), |x, w| {
            (f.eval(x) * *w * g.eval(x).transpose()).entries().to_vec()
        })?;
        Ok(Mat2::new(v[0], v[1], v[2], v[3]))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matpoly::{monic_rw, PolyFamily};

    #[test]
    fn two_point_legendre() {
        let r = gauss_rule(2, 0.0, 0.0, -1.0, 1.0).unwrap();
        let s = 1.0 / 3f64.sqrt();
        assert!((r.nodes[0] + s).abs() < 1e-15 && (r.nodes[1] - s).abs() < 1e-15);
        assert!((r.weights[0] - 1.0).abs() < 1e-15 && (r.weights[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn exactness_degree_five() {
        let r = gauss_rule(3, 0.0, 0.0, -1.0, 1.0).unwrap();
        assert!((r.integrate(|x: f64| x.powi(4)) - 0.4).abs() < 1e-15);
        assert_eq!(r.exact_degree, Exactness::Degree(5));
    }

    #[test]
    fn half_exponent_mass() {
        let r = gauss_rule(10, 0.5, 0.5, -1.0, 1.0).unwrap();
        assert!((r.integrate(|_| 1.0) - std::f64::consts::FRAC_PI_2).abs() < 1e-14);
        assert!(r.nodes.windows(2).all(|w| w[0] < w[1]));
        assert!(r.weights.iter().all(|&w| w > 0.0));
        assert!(r.nodes[0] > -1.0 && r.nodes[9] < 1.0);
    }

    #[test]
    fn mapped_interval_with_singular_left_end() {
        // ∫_{-1}^{0.3} (x+1)^{-1/2} x² dx against the closed form.
        let r = gauss_rule(8, -0.5, 0.0, -1.0, 0.3).unwrap();
        let got = r.integrate(|x| x * x);
        // (x+1)^{-1/2}x² integrates to 2√(x+1)(3x² − 4x + 8)/15.
        let f = |x: f64| 2.0 * (x + 1.0).sqrt() * (3.0 * x * x - 4.0 * x + 8.0) / 15.0;
        assert!((got - (f(0.3) - f(-1.0))).abs() < 1e-14);
    }

    #[test]
    fn r0_inner_products() {
        let params = Params::<f64>::new(4.0, 1.0).unwrap();
        let q = WeightedQuadrature::new(params);
        let r0 = monic_rw(0, &params);
        let full = q.inner_product(&r0, &r0, Domain::Full, None).unwrap();
        assert!((full - Mat2::diag(64.0 / 15.0, 32.0 / 15.0)).max_abs() < 1e-13);
        let half = q.inner_product(&r0, &r0, Domain::Cap(0.0), None).unwrap();
        assert!((half - Mat2::new(32.0 / 15.0, 1.0, 1.0, 16.0 / 15.0)).max_abs() < 1e-13);
        assert!(half.get(0, 1).abs() > 0.1, "odd off-diagonal survives on the cap");
        assert!(full.get(0, 1).abs() < 1e-15);
    }

    #[test]
    fn orthogonality_and_hermiticity() {
        let params = Params::new(4.0, 1.0).unwrap();
        let fam = PolyFamily::new(params, 8).unwrap();
        let q = WeightedQuadrature::new(params);
        let g = q.inner_product(fam.orthonormal(2), fam.orthonormal(7), Domain::Full, None).unwrap();
        assert!(g.max_abs() < 1e-10);
        let id = q
            .inner_product(fam.orthonormal(0), fam.orthonormal(0), Domain::from_alpha(1.0).unwrap(), None)
            .unwrap();
        assert!((id - Mat2::identity()).max_abs() < 1e-13);
        let ab = q.inner_product(fam.orthonormal(3), fam.orthonormal(4), Domain::Cap(0.2), None).unwrap();
        let ba = q.inner_product(fam.orthonormal(4), fam.orthonormal(3), Domain::Cap(0.2), None).unwrap();
        assert!((ab - ba.transpose()).max_abs() < 1e-13);
    }

    #[test]
    fn adaptive_cap_converges() {
        let params = Params::new(3.0, 1.2).unwrap();
        let q = WeightedQuadrature::new(params);
        assert!(!q.is_exact(Domain::Cap(0.4)));
        let r = monic_rw(3, &params);
        let v = q.inner_product(&r, &r, Domain::Cap(0.4), None).unwrap();
        let e = v.sym_eig(1e-14).unwrap();
        assert!(e.values[0] > 0.0);
    }
}
