//! The matrix weight W_{p,n}, right-acting second-order differential
//! operators (D and the band-limited D̃), the symmetry/boundary equations,
//! and the differentiation formulas for R_w and Q_w.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::Mat2;
use crate::matpoly::{monic_rw, recursion_matrices, Jet, MatPoly, Params, PolyFamily};
use crate::scalar::{idx, lit, Scalar};

/// Quadratic matrix part of the weight:
/// [[p x² + n − p, −n x], [−n x, (n − p) x² + p]].
pub fn weight_poly<T: Scalar>(params: &Params<T>) -> MatPoly<T> {
    let (n, p, q) = (params.n(), params.p(), params.q());
    let z = T::zero();
    MatPoly::new(vec![
        Mat2::diag(q, p),
        Mat2::antidiag(-n, -n),
        Mat2::new(p, z, z, q),
    ])
}

/// W(x) = (1 − x²)^{n/2 − 1} times [`weight_poly`], for |x| ≤ 1.
pub fn weight_eval<T: Scalar>(params: &Params<T>, x: T) -> Result<Mat2<T>> {
    if !(x.abs() <= T::one()) {
        return Err(Error::Domain(format!("weight evaluated at x = {x}")));
    }
    Ok(Weight::new(*params).eval(x))
}

/// The weight as a function of x, with its closed-form derivative.
#[derive(Clone, Debug)]
pub struct Weight<T> {
    params: Params<T>,
    form: WeightedPoly<T>,
}

impl<T: Scalar> Weight<T> {
    pub fn new(params: Params<T>) -> Self {
        Self {
            params,
            form: WeightedPoly::new(params.weight_exponent(), weight_poly(&params)),
        }
    }

    pub fn params(&self) -> &Params<T> {
        &self.params
    }

    pub fn eval(&self, x: T) -> Mat2<T> {
        self.form.eval(x)
    }

    /// W′(x) in closed form.
    pub fn derivative(&self, x: T) -> Mat2<T> {
        self.form.deriv().eval(x)
    }

    /// W as (1 − x²)^m · P(x).
    pub fn form(&self) -> &WeightedPoly<T> {
        &self.form
    }
}

/// (1 − x²)^exp · poly(x), closed under differentiation and under
/// multiplication by matrix polynomials.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightedPoly<T> {
    pub exp: T,
    pub poly: MatPoly<T>,
}

impl<T: Scalar> WeightedPoly<T> {
    pub fn new(exp: T, poly: MatPoly<T>) -> Self {
        Self { exp, poly }
    }

    pub fn eval(&self, x: T) -> Mat2<T> {
        let u = T::one() - x * x;
        let factor = if self.exp.is_zero() { T::one() } else { u.powf(self.exp) };
        self.poly.eval(x).scale(factor)
    }

    /// d/dx (u^e Q) = u^{e−1} (−2 e x Q + u Q′), u = 1 − x².
    pub fn deriv(&self) -> Self {
        let e = self.exp;
        let two = idx::<T>(2);
        let a = self.poly.mul_scalar_poly(&[T::zero(), -two * e]);
        let b = self.poly.deriv().mul_scalar_poly(&[T::one(), T::zero(), -T::one()]);
        Self::new(e - T::one(), a.add(&b))
    }

    pub fn left_mul(&self, f: &MatPoly<T>) -> Self {
        Self::new(self.exp, f.mul(&self.poly))
    }

    pub fn right_mul(&self, f: &MatPoly<T>) -> Self {
        Self::new(self.exp, self.poly.mul(f))
    }

    pub fn transpose(&self) -> Self {
        Self::new(self.exp, self.poly.transpose())
    }

    pub fn scale(&self, s: T) -> Self {
        Self::new(self.exp, self.poly.scale(s))
    }

    /// Rewrites with a smaller exponent `target`, exp − target a non-negative integer.
    fn lowered(&self, target: T) -> Self {
        let k = (self.exp - target).round().to_usize().unwrap_or(0);
        let mut poly = self.poly.clone();
        for _ in 0..k {
            poly = poly.mul_scalar_poly(&[T::one(), T::zero(), -T::one()]);
        }
        Self::new(target, poly)
    }

    pub fn add(&self, other: &Self) -> Self {
        let e = self.exp.min(other.exp);
        Self::new(e, self.lowered(e).poly.add(&other.lowered(e).poly))
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(-T::one()))
    }
}

/// Second-order differential operator acting on the right:
/// f ↦ f″·F₂ + f′·F₁ + f·F₀.
#[derive(Clone, Debug, PartialEq)]
pub struct RightDiffOp<T> {
    pub f2: MatPoly<T>,
    pub f1: MatPoly<T>,
    pub f0: MatPoly<T>,
}

impl<T: Scalar> RightDiffOp<T> {
    pub fn apply_right(&self, f: &MatPoly<T>) -> MatPoly<T> {
        let d1 = f.deriv();
        let d2 = d1.deriv();
        d2.mul(&self.f2).add(&d1.mul(&self.f1)).add(&f.mul(&self.f0))
    }

    /// Pointwise action from a jet (value, f′, f″) at x.
    pub fn apply_jet(&self, jet: &Jet<T>, x: T) -> Mat2<T> {
        jet.d2 * self.f2.eval(x) + jet.d1 * self.f1.eval(x) + jet.value * self.f0.eval(x)
    }

    /// Largest coefficient discrepancy with another operator.
    pub fn distance(&self, other: &Self) -> T {
        [
            self.f2.sub(&other.f2).coeff_norm(),
            self.f1.sub(&other.f1).coeff_norm(),
            self.f0.sub(&other.f0).coeff_norm(),
        ]
        .into_iter()
        .fold(T::zero(), T::max)
    }
}

/// D = d²/dx² (1 − x²) − d/dx ((n+2)x + 2J) − diag(p, n − p), J the exchange matrix.
pub fn op_d<T: Scalar>(params: &Params<T>) -> RightDiffOp<T> {
    let two = idx::<T>(2);
    RightDiffOp {
        f2: MatPoly::from_scalar(&[T::one(), T::zero(), -T::one()]),
        f1: MatPoly::new(vec![
            Mat2::exchange().scale(-two),
            Mat2::scalar(-(params.n() + two)),
        ]),
        f0: MatPoly::constant(-Mat2::diag(params.p(), params.q())),
    }
}

/// Eigenvalue Λ_w of D: diag(−w(w+n+1) − p, −w(w+n+1) − n + p).
pub fn eigenvalue_d<T: Scalar>(w: usize, params: &Params<T>) -> Mat2<T> {
    let wt = idx::<T>(w);
    let base = -wt * (wt + params.n() + T::one());
    Mat2::diag(base - params.p(), base - params.q())
}

/// E₀ = [[0, n − p + 1], [p + 1, 0]].
pub fn e0<T: Scalar>(params: &Params<T>) -> Mat2<T> {
    Mat2::antidiag(params.q() + T::one(), params.p() + T::one())
}

/// E₁ = −N(N + n + 2)·I − diag(p, n − p).
pub fn e1<T: Scalar>(params: &Params<T>, big_n: usize) -> Mat2<T> {
    Mat2::scalar(-band_constant(params, big_n)) - Mat2::diag(params.p(), params.q())
}

/// N(N + n + 2).
pub fn band_constant<T: Scalar>(params: &Params<T>, big_n: usize) -> T {
    let nt = idx::<T>(big_n);
    nt * (nt + params.n() + idx(2))
}

/// Deliberate corruptions of D̃ used as negative controls.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mutation {
    #[default]
    None,
    /// Replace the constant E₀ in the zeroth-order coefficient by zero.
    DropE0,
}

impl std::str::FromStr for Mutation {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Mutation::None),
            "drop-e0" => Ok(Mutation::DropE0),
            other => Err(Error::InvalidParams(format!("unknown mutation '{other}'"))),
        }
    }
}

fn check_alpha<T: Scalar>(alpha: T) -> Result<()> {
    if alpha > -T::one() && alpha < T::one() {
        Ok(())
    } else {
        Err(Error::Domain(format!("alpha = {alpha} must lie in (-1, 1)")))
    }
}

/// The operator D̃ commuting with the band-limited integral operator:
/// F̃₂ = (x² − 1)(x − α), F̃₁ = (n+3)x² − α(n+2)x − 1 + 2(x − α)J,
/// F̃₀ = −N(N+n+2)x + α(n − 2p)e₁₁ + E₀.
pub fn op_dtilde<T: Scalar>(params: &Params<T>, big_n: usize, alpha: T) -> Result<RightDiffOp<T>> {
    op_dtilde_mutated(params, big_n, alpha, Mutation::None)
}

pub fn op_dtilde_mutated<T: Scalar>(
    params: &Params<T>,
    big_n: usize,
    alpha: T,
    mutation: Mutation,
) -> Result<RightDiffOp<T>> {
    check_alpha(alpha)?;
    let n = params.n();
    let one = T::one();
    let two = idx::<T>(2);
    let f2 = MatPoly::from_scalar(&[alpha, -one, -alpha, one]);
    let f1 = MatPoly::new(vec![
        Mat2::scalar(-one) - Mat2::exchange().scale(two * alpha),
        Mat2::scalar(-alpha * (n + two)) + Mat2::exchange().scale(two),
        Mat2::scalar(n + idx(3)),
    ]);
    let constant = Mat2::e11().scale(alpha * params.asymmetry())
        + match mutation {
            Mutation::None => e0(params),
            Mutation::DropE0 => Mat2::zero(),
        };
    let f0 = MatPoly::new(vec![constant, Mat2::scalar(-band_constant(params, big_n))]);
    Ok(RightDiffOp { f2, f1, f0 })
}

/// D̃ rebuilt from D: −D·(x − α) + (d/dx)(x² − 1) + E₁x + α(n − p)·I + E₀.
pub fn dtilde_from_d<T: Scalar>(params: &Params<T>, big_n: usize, alpha: T) -> Result<RightDiffOp<T>> {
    check_alpha(alpha)?;
    let d = op_d(params);
    let lin = [-alpha, T::one()];
    let neg = |f: &MatPoly<T>| f.mul_scalar_poly(&lin).scale(-T::one());
    Ok(RightDiffOp {
        f2: neg(&d.f2),
        f1: neg(&d.f1).add(&MatPoly::from_scalar(&[-T::one(), T::zero(), T::one()])),
        f0: neg(&d.f0)
            .add(&MatPoly::monomial(1, e1(params, big_n)))
            .add(&MatPoly::constant(Mat2::scalar(alpha * params.q()) + e0(params))),
    })
}

/// Approach of one endpoint by the two boundary quantities.
#[derive(Clone, Debug, Serialize)]
pub struct BoundaryLimit {
    pub endpoint: f64,
    /// ‖F₂W‖ along the approach sequence.
    pub f2w: Vec<f64>,
    /// ‖F₁W − WF₁*‖ along the approach sequence.
    pub f1w: Vec<f64>,
    pub monotone: bool,
    pub limit: f64,
}

impl BoundaryLimit {
    pub fn passes(&self, tol: f64) -> bool {
        self.monotone && self.limit <= tol
    }
}

/// Residuals of the three symmetry equations on a grid and the two boundary limits.
#[derive(Clone, Debug, Serialize)]
pub struct SymmetryReport {
    pub interval: (f64, f64),
    pub eq1: f64,
    pub eq2: f64,
    pub eq3: f64,
    pub left: BoundaryLimit,
    pub right: BoundaryLimit,
}

impl SymmetryReport {
    pub fn max_equation_residual(&self) -> f64 {
        self.eq1.max(self.eq2).max(self.eq3)
    }

    pub fn passes(&self, tol: f64) -> bool {
        self.max_equation_residual() <= tol && self.left.passes(tol) && self.right.passes(tol)
    }
}

/// Boundary approach offsets 2^{-k}·(b − a) for k in this range.
pub const BOUNDARY_STEPS: std::ops::RangeInclusive<i32> = 5..=40;

/// The three symmetry equations for (op, W) as exact weighted polynomials:
/// F₂W − WF₂*, 2(F₂W)′ − F₁W − WF₁*, (F₂W)″ − (F₁W)′ + F₀W − WF₀*.
pub fn symmetry_equations<T: Scalar>(op: &RightDiffOp<T>, weight: &Weight<T>) -> [WeightedPoly<T>; 3] {
    let w = weight.form();
    let f2w = w.left_mul(&op.f2);
    let f1w = w.left_mul(&op.f1);
    let f0w = w.left_mul(&op.f0);
    let eq1 = f2w.sub(&w.right_mul(&op.f2.transpose()));
    let eq2 = f2w
        .deriv()
        .scale(idx(2))
        .sub(&f1w)
        .sub(&w.right_mul(&op.f1.transpose()));
    let eq3 = f2w
        .deriv()
        .deriv()
        .sub(&f1w.deriv())
        .add(&f0w)
        .sub(&w.right_mul(&op.f0.transpose()));
    [eq1, eq2, eq3]
}

/// Evaluates the symmetry equations on `grid` interior points of (a, b) and
/// samples the boundary quantities along x_k = endpoint ∓ 2^{−k}(b − a).
pub fn symmetry_residuals<T: Scalar>(
    op: &RightDiffOp<T>,
    weight: &Weight<T>,
    a: T,
    b: T,
    grid: usize,
) -> Result<SymmetryReport> {
    if !(a < b && a >= -T::one() && b <= T::one()) || grid == 0 {
        return Err(Error::Domain(format!("symmetry interval ({a}, {b}) with grid {grid}")));
    }
    let eqs = symmetry_equations(op, weight);
    let width = b - a;
    let mut maxes = [0.0f64; 3];
    for i in 0..grid {
        let x = a + width * (idx::<T>(i) + lit(0.5)) / idx(grid);
        for (m, eq) in maxes.iter_mut().zip(&eqs) {
            *m = m.max(eq.eval(x).frobenius().to_f64().unwrap_or(f64::NAN));
        }
    }
    let f2w = weight.form().left_mul(&op.f2);
    let f1w = weight.form().left_mul(&op.f1);
    let limit = |endpoint: T, dir: T| {
        let mut s2 = Vec::new();
        let mut s1 = Vec::new();
        for k in BOUNDARY_STEPS {
            let x = endpoint + dir * width * lit::<T>(2.0).powi(-k);
            let wv = weight.eval(x);
            let v1 = f1w.eval(x) - wv * op.f1.eval(x).transpose();
            s2.push(f2w.eval(x).frobenius().to_f64().unwrap_or(f64::NAN));
            s1.push(v1.frobenius().to_f64().unwrap_or(f64::NAN));
        }
        let mono = |s: &[f64]| s.windows(2).all(|p| p[1] <= p[0] * (1.0 + 1e-9) + 1e-15);
        let lim = s2.last().copied().unwrap_or(0.0).max(s1.last().copied().unwrap_or(0.0));
        BoundaryLimit {
            endpoint: endpoint.to_f64().unwrap_or(f64::NAN),
            monotone: mono(&s2) && mono(&s1),
            limit: lim,
            f2w: s2,
            f1w: s1,
        }
    };
    Ok(SymmetryReport {
        interval: (a.to_f64().unwrap_or(f64::NAN), b.to_f64().unwrap_or(f64::NAN)),
        eq1: maxes[0],
        eq2: maxes[1],
        eq3: maxes[2],
        left: limit(a, T::one()),
        right: limit(b, -T::one()),
    })
}

/// The four free parameters of the differentiation formula.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct FreeParams<T> {
    pub a21: T,
    pub c12: T,
    pub a11: T,
    pub a22: T,
}

impl<T: Scalar> FreeParams<T> {
    /// a21 = −1 − (n+2w)/((p+w)(n−p+w)), everything else zero; makes
    /// F_w = diag(p, n − p) and G̃_w = E₀.
    pub fn commuting_choice(w: usize, params: &Params<T>) -> Self {
        let wt = idx::<T>(w);
        Self {
            a21: -T::one() - (params.n() + wt + wt) / ((params.p() + wt) * (params.q() + wt)),
            ..Default::default()
        }
    }
}

/// (F_w, G_w, G̃_w, H_w) of (1−x²)R′_w = −wxR_w + x(F_wR_w − R_wF_w) + G_wR_w + R_wG̃_w + H_wR_{w−1}.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DiffMatrices<T> {
    pub f: Mat2<T>,
    pub g: Mat2<T>,
    pub g_tilde: Mat2<T>,
    pub h: Mat2<T>,
}

pub fn diff_formula_matrices<T: Scalar>(
    w: usize,
    params: &Params<T>,
    fp: &FreeParams<T>,
) -> Result<DiffMatrices<T>> {
    let (n, p, q) = (params.n(), params.p(), params.q());
    let asym = params.asymmetry();
    if !fp.c12.is_zero() && asym.is_zero() {
        return Err(Error::SingularParameter {
            c12: fp.c12.to_f64().unwrap_or(f64::NAN),
        });
    }
    let wt = idx::<T>(w);
    let one = T::one();
    let (pw, qw) = (p + wt, q + wt);
    let ratio = (n + wt + wt) / (pw * qw);
    let dpq = Mat2::diag(p, q);
    let c12_part = |m: Mat2<T>| if fp.c12.is_zero() { Mat2::zero() } else { m.scale(fp.c12) };

    let f = dpq.scale(-ratio - fp.a21)
        + c12_part(Mat2::antidiag(p, q).scale(pw * qw / asym))
        + Mat2::scalar(fp.a11);
    let g = Mat2::antidiag(p * qw / (pw * pw), q * pw / (qw * qw))
        + Mat2::antidiag(p * qw / pw, q * pw / qw).scale(fp.a21)
        + c12_part(Mat2::e11().scale(wt * (wt + n) - p * q))
        + Mat2::scalar(fp.a22);
    let g_tilde = Mat2::exchange() - Mat2::antidiag(q, p).scale(ratio + fp.a21)
        + c12_part(Mat2::diag(p * q, -wt * (wt + n)))
        - Mat2::scalar(fp.a22);
    let h = if w == 0 {
        Mat2::zero()
    } else {
        let lead = wt * (wt + n) / (pw * (n - one + wt + wt) * qw);
        Mat2::diag(lead * (pw - one) * (qw + one), lead * (pw + one) * (qw - one))
            + c12_part(
                Mat2::antidiag(p * (qw - one) / pw, -(pw - one) * q / qw)
                    .scale(wt * (n + wt) / (n - one + wt + wt)),
            )
    };
    Ok(DiffMatrices { f, g, g_tilde, h })
}

/// Coefficient residual of the monic differentiation formula with a given
/// H-matrix (so alternative prefactors can be compared), scaled by
/// max(1, coefficient norm of R_w).
pub fn diff_formula_residual_with<T: Scalar>(w: usize, params: &Params<T>, m: &DiffMatrices<T>) -> T {
    let r = monic_rw(w, params);
    let prev = if w == 0 { MatPoly::zero() } else { monic_rw(w - 1, params) };
    let one_minus_x2 = [T::one(), T::zero(), -T::one()];
    let lhs = r.deriv().mul_scalar_poly(&one_minus_x2);
    let rhs = r
        .mul_x()
        .scale(-idx::<T>(w))
        .add(&r.mul_left_const(&m.f).sub(&r.mul_right_const(&m.f)).mul_x())
        .add(&r.mul_left_const(&m.g))
        .add(&r.mul_right_const(&m.g_tilde))
        .add(&prev.mul_left_const(&m.h));
    lhs.sub(&rhs).coeff_norm() / r.coeff_norm().max(T::one())
}

pub fn diff_formula_residual<T: Scalar>(w: usize, params: &Params<T>, fp: &FreeParams<T>) -> Result<T> {
    Ok(diff_formula_residual_with(w, params, &diff_formula_matrices(w, params, fp)?))
}

/// (F̄_w, Ḡ_w, H̄_w, G̃_w) for the orthonormal family: conjugation by the norm matrices.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OrthonormalDiffMatrices<T> {
    pub f_bar: Mat2<T>,
    pub g_bar: Mat2<T>,
    pub h_bar: Mat2<T>,
    pub g_tilde: Mat2<T>,
    /// The unconjugated F_w, which multiplies Q_w from the right.
    pub f: Mat2<T>,
}

pub fn orthonormal_diff_matrices<T: Scalar>(
    w: usize,
    family: &PolyFamily<T>,
    fp: &FreeParams<T>,
) -> Result<OrthonormalDiffMatrices<T>> {
    let m = diff_formula_matrices(w, family.params(), fp)?;
    let (s, norm) = (family.inv_norm(w), family.norm(w));
    let h_bar = if w == 0 { Mat2::zero() } else { s * m.h * family.norm(w - 1) };
    Ok(OrthonormalDiffMatrices {
        f_bar: s * m.f * norm,
        g_bar: s * m.g * norm,
        h_bar,
        g_tilde: m.g_tilde,
        f: m.f,
    })
}

/// Coefficient residual of the orthonormal differentiation formula, relative
/// to the coefficient norm of Q_w.
pub fn orthonormal_diff_residual<T: Scalar>(w: usize, family: &PolyFamily<T>, fp: &FreeParams<T>) -> Result<T> {
    let m = orthonormal_diff_matrices(w, family, fp)?;
    let q = family.orthonormal(w);
    let prev = if w == 0 { MatPoly::zero() } else { family.orthonormal(w - 1).clone() };
    let lhs = q.deriv().mul_scalar_poly(&[T::one(), T::zero(), -T::one()]);
    let rhs = q
        .mul_x()
        .scale(-idx::<T>(w))
        .add(&q.mul_left_const(&m.f_bar).sub(&q.mul_right_const(&m.f)).mul_x())
        .add(&q.mul_left_const(&m.g_bar))
        .add(&q.mul_right_const(&m.g_tilde))
        .add(&prev.mul_left_const(&m.h_bar));
    Ok(lhs.sub(&rhs).coeff_norm() / q.coeff_norm().max(T::one()))
}

/// Which of the two derived identities 0 = x(M R − R M) + N R + R Ñ (+ J R_{w−1}).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Corollary {
    /// M = diag(p, n − p), no R_{w−1} term.
    Diagonal,
    /// The family with 1/(n − 2p) and the J_w R_{w−1} term.
    Antidiagonal,
}

pub fn corollary_residual<T: Scalar>(w: usize, params: &Params<T>, which: Corollary) -> Result<T> {
    let (n, p, q) = (params.n(), params.p(), params.q());
    let wt = idx::<T>(w);
    let (pw, qw) = (p + wt, q + wt);
    let one = T::one();
    let (m, nn, nt, j) = match which {
        Corollary::Diagonal => (
            Mat2::diag(p, q),
            -Mat2::antidiag(p * qw / pw, q * pw / qw),
            Mat2::antidiag(q, p),
            Mat2::zero(),
        ),
        Corollary::Antidiagonal => {
            let asym = params.asymmetry();
            if asym.is_zero() {
                return Err(Error::SingularParameter { c12: 1.0 });
            }
            let j = if w == 0 {
                Mat2::zero()
            } else {
                Mat2::antidiag(p * (qw - one) / pw, -(pw - one) * q / qw)
                    .scale(wt * (n + wt) / (n - one + wt + wt))
            };
            (
                Mat2::antidiag(p, q).scale(pw * qw / asym),
                Mat2::e11().scale(wt * (wt + n) - p * q),
                Mat2::diag(p * q, -wt * (wt + n)),
                j,
            )
        }
    };
    let r = monic_rw(w, params);
    let prev = if w == 0 { MatPoly::zero() } else { monic_rw(w - 1, params) };
    let total = r
        .mul_left_const(&m)
        .sub(&r.mul_right_const(&m))
        .mul_x()
        .add(&r.mul_left_const(&nn))
        .add(&r.mul_right_const(&nt))
        .add(&prev.mul_left_const(&j));
    Ok(total.coeff_norm() / r.coeff_norm().max(one))
}

/// ‖R_w D − Λ_w R_w‖ over coefficients, relative to the coefficient norm of R_w.
pub fn eigen_relation_residual<T: Scalar>(w: usize, params: &Params<T>) -> T {
    let r = monic_rw(w, params);
    let lhs = op_d(params).apply_right(&r);
    lhs.sub(&r.mul_left_const(&eigenvalue_d(w, params))).coeff_norm() / r.coeff_norm()
}

/// Monic recurrence residual x R_w − A_w R_{w−1} − B_w R_w − R_{w+1} as a polynomial.
pub fn monic_recursion_defect<T: Scalar>(w: usize, params: &Params<T>) -> MatPoly<T> {
    let (a, b) = recursion_matrices(w, params);
    let r = monic_rw(w, params);
    let prev = if w == 0 { MatPoly::zero() } else { monic_rw(w - 1, params) };
    r.mul_x()
        .sub(&prev.mul_left_const(&a))
        .sub(&r.mul_left_const(&b))
        .sub(&monic_rw(w + 1, params))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn p41() -> Params<f64> {
        Params::new(4.0, 1.0).unwrap()
    }

    #[test]
    fn weight_values() {
        assert_eq!(weight_eval(&p41(), 0.0).unwrap(), Mat2::diag(3.0, 1.0));
        assert!(weight_eval(&p41(), 1.0).unwrap().is_zero());
        let det = weight_eval(&p41(), 0.5).unwrap().det();
        assert!((det - 0.94921875).abs() < 1e-15);
        assert!(weight_eval(&p41(), 1.5).is_err());
    }

    #[test]
    fn weight_determinant_identity() {
        for params in [p41(), Params::new(3.0, 1.2).unwrap()] {
            let (n, p) = (params.n(), params.p());
            for i in 0..64 {
                let x = -1.0 + (i as f64 + 0.5) / 32.0;
                let w = weight_eval(&params, x).unwrap();
                let want = p * (n - p) * (1.0 - x * x).powf(n);
                assert!((w.det() - want).abs() <= 1e-10 * want);
                assert_eq!(w.get(0, 1), w.get(1, 0));
                assert!(w.trace() > 0.0);
            }
        }
    }

    #[test]
    fn weight_derivative_matches_finite_difference() {
        let weight = Weight::new(Params::new(3.0, 1.2).unwrap());
        for &x in &[-0.7, 0.1, 0.6] {
            let h = 1e-6;
            let fd = (weight.eval(x + h) - weight.eval(x - h)).scale(0.5 / h);
            assert!((fd - weight.derivative(x)).max_abs() < 1e-6);
        }
    }

    #[test]
    fn d_on_constants_and_r1() {
        let d = op_d(&p41());
        assert_eq!(d.apply_right(&MatPoly::identity()), MatPoly::constant(Mat2::diag(-1.0, -3.0)));
        assert_eq!(eigenvalue_d(0, &p41()), Mat2::diag(-1.0, -3.0));
        let r1 = monic_rw(1, &p41());
        let lam = eigenvalue_d(1, &p41());
        assert_eq!(lam, Mat2::diag(-7.0, -9.0));
        assert!(d.apply_right(&r1).sub(&r1.mul_left_const(&lam)).coeff_norm() < 1e-15);
    }

    #[test]
    fn eigen_relation_negative_control() {
        let params = p41();
        let x = MatPoly::identity().mul_x();
        let res = op_d(&params)
            .apply_right(&x)
            .sub(&x.mul_left_const(&eigenvalue_d(3, &params)))
            .coeff_norm();
        assert!(res > 0.1);
        assert!(eigen_relation_residual(5, &params) < 1e-10);
    }

    #[test]
    fn dtilde_constants() {
        let params = p41();
        assert_eq!(e1(&params, 10), Mat2::diag(-161.0, -163.0));
        assert_eq!(e0(&params), Mat2::new(0.0, 4.0, 2.0, 0.0));
        let dt = op_dtilde(&params, 10, 0.3).unwrap();
        assert!(dt.f2.eval(0.3).max_abs() < 1e-16);
        assert!(op_dtilde(&params, 3, 1.0).is_err());
    }

    #[test]
    fn dtilde_decomposition() {
        for params in [p41(), Params::new(3.0, 1.2).unwrap()] {
            for &alpha in &[-0.5, 0.0, 0.3, 0.9] {
                let direct = op_dtilde(&params, 7, alpha).unwrap();
                let via_d = dtilde_from_d(&params, 7, alpha).unwrap();
                assert!(direct.distance(&via_d) <= 1e-13);
            }
        }
    }

    #[test]
    fn dtilde_degree_bound() {
        let params = p41();
        let fam = PolyFamily::new(params, 8).unwrap();
        let dt = op_dtilde(&params, 8, 0.3).unwrap();
        for w in 0..=8 {
            let out = dt.apply_right(fam.orthonormal(w));
            assert!(out.degree() <= w as i64 + 1);
        }
        let top = dt.apply_right(fam.orthonormal(8));
        let tol = 1e-10 * top.coeff_norm();
        assert!(top.effective_degree(tol) <= 8);
    }

    #[test]
    fn symmetry_of_d_and_dtilde() {
        let params = p41();
        let weight = Weight::new(params);
        let rep = symmetry_residuals(&op_d(&params), &weight, -1.0, 1.0, 64).unwrap();
        assert!(rep.passes(1e-10), "{rep:?}");
        let dt = op_dtilde(&params, 6, 0.3).unwrap();
        let rep = symmetry_residuals(&dt, &weight, -1.0, 0.3, 64).unwrap();
        assert!(rep.passes(1e-10), "{rep:?}");
    }

    #[test]
    fn d_is_not_symmetric_on_a_cap() {
        let params = p41();
        let rep = symmetry_residuals(&op_d(&params), &Weight::new(params), -1.0, 0.3, 64).unwrap();
        assert!(rep.max_equation_residual() < 1e-10);
        assert!(!rep.right.passes(1e-9));
    }

    #[test]
    fn commuting_choice_matrices() {
        for params in [p41(), Params::new(3.0, 1.2).unwrap()] {
            for w in 0..10 {
                let fp = FreeParams::commuting_choice(w, &params);
                let m = diff_formula_matrices(w, &params, &fp).unwrap();
                assert!((m.f - Mat2::diag(params.p(), params.q())).max_abs() < 1e-13);
                assert!((m.g_tilde - e0(&params)).max_abs() < 1e-13);
                let wt = w as f64;
                let (p, q) = (params.p(), params.q());
                let g = -Mat2::antidiag(p * (q + wt + 1.0) / (p + wt), q * (p + wt + 1.0) / (q + wt));
                assert!((m.g - g).max_abs() < 1e-13);
            }
        }
    }

    #[test]
    fn diff_formula_low_degree() {
        let r = diff_formula_residual(1, &p41(), &FreeParams::default()).unwrap();
        assert!(r <= 1e-12);
    }

    #[test]
    fn c12_requires_asymmetric_params() {
        let params = Params::new(4.0, 2.0).unwrap();
        let fp = FreeParams { c12: 1.0, ..Default::default() };
        assert!(matches!(
            diff_formula_matrices(3, &params, &fp),
            Err(Error::SingularParameter { .. })
        ));
        assert!(diff_formula_matrices(3, &params, &FreeParams::default()).is_ok());
        assert!(corollary_residual(3, &params, Corollary::Antidiagonal).is_err());
    }

    #[test]
    fn corollaries() {
        assert!(corollary_residual(3, &p41(), Corollary::Diagonal).unwrap() <= 1e-11);
        assert!(corollary_residual(0, &p41(), Corollary::Diagonal).unwrap() <= 1e-13);
        assert!(corollary_residual(0, &p41(), Corollary::Antidiagonal).unwrap() <= 1e-13);
        let params = Params::new(3.0, 1.2).unwrap();
        assert!(corollary_residual(6, &params, Corollary::Antidiagonal).unwrap() <= 1e-9);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(50))]
        #[test]
        fn diff_formula_any_free_params(
            a21 in -2.0f64..2.0, c12 in -2.0f64..2.0, a11 in -2.0f64..2.0, a22 in -2.0f64..2.0,
            w in 0usize..=12,
        ) {
            let params = Params::new(4.0, 1.3).unwrap();
            let fp = FreeParams { a21, c12, a11, a22 };
            prop_assert!(diff_formula_residual(w, &params, &fp).unwrap() <= 1e-9);
        }
    }
}
