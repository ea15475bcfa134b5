//! Matrix-valued polynomials and the 2x2 Gegenbauer-type family attached to
//! the weight W_{p,n}: monic R_w, orthonormal Q_w, their norms and
//! three-term recurrences.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::gegenbauer::{gegenbauer, gegenbauer_coeffs};
use crate::linalg::Mat2;
use crate::quadrature::{gauss_rule, QuadRule};
use crate::scalar::{idx, lit, pochhammer, Scalar};

/// The two real parameters of the family, 0 < p < n.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Params<T> {
    n: T,
    p: T,
}

impl<T: Scalar> Params<T> {
    pub fn new(n: T, p: T) -> Result<Self> {
        if !(n.is_finite() && p.is_finite() && p > T::zero() && p < n) {
            return Err(Error::InvalidParams(format!(
                "need 0 < p < n, got n = {n}, p = {p}"
            )));
        }
        Ok(Self { n, p })
    }

    pub fn n(&self) -> T {
        self.n
    }

    pub fn p(&self) -> T {
        self.p
    }

    /// n − p.
    pub fn q(&self) -> T {
        self.n - self.p
    }

    /// Exponent n/2 − 1 of the scalar factor (1 − x²) in the weight.
    pub fn weight_exponent(&self) -> T {
        self.n / idx(2) - T::one()
    }

    /// n − 2p, the quantity that appears in denominators of some formulas.
    pub fn asymmetry(&self) -> T {
        self.n - self.p - self.p
    }
}

/// Polynomial in x with 2x2 matrix coefficients; `coeffs[j]` multiplies x^j.
///
/// Trailing zero blocks are always trimmed, so the zero polynomial has no
/// coefficients and degree −1.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct MatPoly<T> {
    coeffs: Vec<Mat2<T>>,
}

impl<T: Scalar> MatPoly<T> {
    pub fn new(mut coeffs: Vec<Mat2<T>>) -> Self {
        while coeffs.last().is_some_and(|c| c.is_zero()) {
            coeffs.pop();
        }
        Self { coeffs }
    }

    pub fn zero() -> Self {
        Self { coeffs: Vec::new() }
    }

    pub fn constant(c: Mat2<T>) -> Self {
        Self::new(vec![c])
    }

    pub fn identity() -> Self {
        Self::constant(Mat2::identity())
    }

    /// c·x^j.
    pub fn monomial(j: usize, c: Mat2<T>) -> Self {
        let mut coeffs = vec![Mat2::zero(); j + 1];
        coeffs[j] = c;
        Self::new(coeffs)
    }

    /// Scalar polynomial times the identity.
    pub fn from_scalar(s: &[T]) -> Self {
        Self::new(s.iter().map(|&v| Mat2::scalar(v)).collect())
    }

    pub fn coeffs(&self) -> &[Mat2<T>] {
        &self.coeffs
    }

    /// Coefficient of x^j, zero beyond the degree.
    pub fn coeff(&self, j: usize) -> Mat2<T> {
        self.coeffs.get(j).copied().unwrap_or_else(Mat2::zero)
    }

    pub fn degree(&self) -> i64 {
        self.coeffs.len() as i64 - 1
    }

    /// Degree ignoring coefficients with every entry below `tol` in magnitude.
    pub fn effective_degree(&self, tol: T) -> i64 {
        self.coeffs
            .iter()
            .rposition(|c| c.max_abs() > tol)
            .map_or(-1, |j| j as i64)
    }

    pub fn eval(&self, x: T) -> Mat2<T> {
        self.coeffs
            .iter()
            .rev()
            .fold(Mat2::zero(), |acc, &c| acc.scale(x) + c)
    }

    pub fn deriv(&self) -> Self {
        Self::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(j, c)| c.scale(idx(j)))
                .collect(),
        )
    }

    pub fn add(&self, other: &Self) -> Self {
        let len = self.coeffs.len().max(other.coeffs.len());
        Self::new((0..len).map(|j| self.coeff(j) + other.coeff(j)).collect())
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(-T::one()))
    }

    pub fn scale(&self, s: T) -> Self {
        Self::new(self.coeffs.iter().map(|c| c.scale(s)).collect())
    }

    /// Product with a scalar polynomial s(x) (coefficients in ascending powers).
    pub fn mul_scalar_poly(&self, s: &[T]) -> Self {
        if self.coeffs.is_empty() || s.is_empty() {
            return Self::zero();
        }
        let mut out = vec![Mat2::zero(); self.coeffs.len() + s.len() - 1];
        for (i, c) in self.coeffs.iter().enumerate() {
            for (j, &v) in s.iter().enumerate() {
                out[i + j] += c.scale(v);
            }
        }
        Self::new(out)
    }

    /// f(x)·c for a constant matrix c.
    pub fn mul_right_const(&self, c: &Mat2<T>) -> Self {
        Self::new(self.coeffs.iter().map(|a| *a * *c).collect())
    }

    /// c·f(x) for a constant matrix c.
    pub fn mul_left_const(&self, c: &Mat2<T>) -> Self {
        Self::new(self.coeffs.iter().map(|a| *c * *a).collect())
    }

    /// Matrix product f(x)·g(x).
    pub fn mul(&self, other: &Self) -> Self {
        if self.coeffs.is_empty() || other.coeffs.is_empty() {
            return Self::zero();
        }
        let mut out = vec![Mat2::zero(); self.coeffs.len() + other.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in other.coeffs.iter().enumerate() {
                out[i + j] += *a * *b;
            }
        }
        Self::new(out)
    }

    /// x·f(x).
    pub fn mul_x(&self) -> Self {
        if self.coeffs.is_empty() {
            return Self::zero();
        }
        let mut out = Vec::with_capacity(self.coeffs.len() + 1);
        out.push(Mat2::zero());
        out.extend_from_slice(&self.coeffs);
        Self::new(out)
    }

    /// Coefficientwise transpose f(x)*.
    pub fn transpose(&self) -> Self {
        Self::new(self.coeffs.iter().map(Mat2::transpose).collect())
    }

    /// Largest coefficient Frobenius norm.
    pub fn coeff_norm(&self) -> T {
        self.coeffs
            .iter()
            .fold(T::zero(), |acc, c| acc.max(c.frobenius()))
    }
}

/// Value and first two derivatives of a matrix function at one point.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct Jet<T> {
    pub value: Mat2<T>,
    pub d1: Mat2<T>,
    pub d2: Mat2<T>,
}

impl<T: Scalar> Jet<T> {
    fn left_mul(&self, c: &Mat2<T>) -> Self {
        Self {
            value: *c * self.value,
            d1: *c * self.d1,
            d2: *c * self.d2,
        }
    }
}

/// w!/(w−j)!.
fn falling<T: Scalar>(w: usize, j: usize) -> T {
    (0..j).fold(T::one(), |acc, i| acc * idx(w - i))
}

/// Monic R_w from the explicit coefficient formulas: even offsets w−2k are
/// diagonal, odd offsets w−2k−1 antidiagonal.
pub fn monic_rw<T: Scalar>(w: usize, params: &Params<T>) -> MatPoly<T> {
    let (n, p, q) = (params.n(), params.p(), params.q());
    let wt = idx::<T>(w);
    let half_n1 = (n + T::one()) / idx(2);
    let mut coeffs = vec![Mat2::zero(); w + 1];
    for k in 0..=(w / 2) {
        let kt = idx::<T>(k);
        let sign = if k % 2 == 0 { T::one() } else { -T::one() };
        let common = sign
            / (lit::<T>(4.0).powi(k as i32)
                * (1..=k).fold(T::one(), |acc, i| acc * idx(i))
                * pochhammer(half_n1 + wt - kt, k));
        let j = w - 2 * k;
        let even = common * falling::<T>(w, 2 * k);
        let shift = idx::<T>(2 * k);
        coeffs[j] = Mat2::diag(even * (p + wt - shift) / (p + wt), even * (q + wt - shift) / (q + wt));
        if 2 * k < w {
            let odd = common * falling::<T>(w, 2 * k + 1);
            coeffs[j - 1] = Mat2::antidiag(odd / (p + wt), odd / (q + wt));
        }
    }
    MatPoly::new(coeffs)
}

/// Monic R_w assembled from Gegenbauer polynomials C^{(n+1)/2}, C^{(n+3)/2}.
pub fn monic_rw_gegenbauer<T: Scalar>(w: usize, params: &Params<T>) -> Result<MatPoly<T>> {
    let (n, p, q) = (params.n(), params.p(), params.q());
    let wt = idx::<T>(w);
    let lambda = (n + T::one()) / idx(2);
    let big = gegenbauer_coeffs(w as i64, lambda)?;
    let lower2 = gegenbauer_coeffs(w as i64 - 2, lambda + T::one())?;
    let lower1 = gegenbauer_coeffs(w as i64 - 1, lambda + T::one())?;
    // w!(n+1) / (2^w ((n+1)/2)_w), accumulated factor by factor.
    let prefactor = (1..=w).fold(n + T::one(), |acc, i| {
        acc * idx(i) / (idx::<T>(2) * (lambda + idx(i - 1)))
    });
    let at = |v: &[T], j: usize| v.get(j).copied().unwrap_or_else(T::zero);
    let n1 = n + T::one();
    let coeffs = (0..=w)
        .map(|j| {
            Mat2::new(
                at(&big, j) / n1 + at(&lower2, j) / (p + wt),
                at(&lower1, j) / (p + wt),
                at(&lower1, j) / (q + wt),
                at(&big, j) / n1 + at(&lower2, j) / (q + wt),
            )
            .scale(prefactor)
        })
        .collect();
    Ok(MatPoly::new(coeffs))
}

/// R_w(x) evaluated pointwise through the Gegenbauer formula, using the
/// stable three-term Gegenbauer recurrence instead of monomial coefficients.
pub fn monic_rw_value<T: Scalar>(w: usize, params: &Params<T>, x: T) -> Result<Mat2<T>> {
    let (n, p, q) = (params.n(), params.p(), params.q());
    let wt = idx::<T>(w);
    let lambda = (n + T::one()) / idx(2);
    let big = gegenbauer(w as i64, lambda, x)?;
    let lower2 = gegenbauer(w as i64 - 2, lambda + T::one(), x)?;
    let lower1 = gegenbauer(w as i64 - 1, lambda + T::one(), x)?;
    let prefactor = (1..=w).fold(n + T::one(), |acc, i| {
        acc * idx(i) / (idx::<T>(2) * (lambda + idx(i - 1)))
    });
    let n1 = n + T::one();
    Ok(Mat2::new(
        big / n1 + lower2 / (p + wt),
        lower1 / (p + wt),
        lower1 / (q + wt),
        big / n1 + lower2 / (q + wt),
    )
    .scale(prefactor))
}

/// Recurrence matrices (A_w, B_w) of x·R_w = A_w R_{w−1} + B_w R_w + R_{w+1}.
pub fn recursion_matrices<T: Scalar>(w: usize, params: &Params<T>) -> (Mat2<T>, Mat2<T>) {
    let (n, p, q) = (params.n(), params.p(), params.q());
    let wt = idx::<T>(w);
    let one = T::one();
    let a = if w == 0 {
        Mat2::zero()
    } else {
        let f = wt * (n + wt)
            / ((n + wt + wt - one) * (p + wt) * (q + wt) * (wt + wt + n + one));
        Mat2::diag(
            f * (p + wt - one) * (q + wt + one),
            f * (p + wt + one) * (q + wt - one),
        )
    };
    let b = Mat2::antidiag(
        -p / ((p + wt) * (p + wt + one)),
        -q / ((q + wt) * (q + wt + one)),
    );
    (a, b)
}

/// Closed-form expression for ⟨R_w, R_w⟩ as printed alongside the family.
///
/// Kept as a diagnostic; the quadrature value is authoritative (see
/// [`PolyFamily::norm_ratio_table`]).
pub fn norm_closed_form<T: Scalar>(w: usize, params: &Params<T>) -> Mat2<T> {
    let (n, p, q) = (params.n(), params.p(), params.q());
    let wt = idx::<T>(w);
    let one = T::one();
    let two = idx::<T>(2);
    let rising_over_fact = (1..=w).fold(one, |acc, i| acc * (n + idx(i)) / idx(i));
    let pre = T::PI().sqrt() * (n / two + one).gamma() * rising_over_fact
        / ((n + one) * (n + wt + wt + one) * (n / two + lit(1.5)).gamma());
    Mat2::diag(
        pre * p * (q + wt + one) / (p + wt),
        pre * q * (p + wt + one) / (q + wt),
    )
}

/// One row of the norm diagnostic: quadrature norm over closed form.
#[derive(Clone, Debug, Serialize)]
pub struct NormRatio {
    pub w: usize,
    pub quadrature: [f64; 2],
    pub closed_form: [f64; 2],
    pub ratio: [f64; 2],
}

/// The family R_w, Q_w for w = 0..=max_degree with its recurrence data and
/// quadrature norms.
#[derive(Clone, Debug)]
pub struct PolyFamily<T> {
    params: Params<T>,
    max_degree: usize,
    monic: Vec<MatPoly<T>>,
    rec_a: Vec<Mat2<T>>,
    rec_b: Vec<Mat2<T>>,
    norm_sq: Vec<Mat2<T>>,
    quad_norm_sq: Vec<Mat2<T>>,
    norm: Vec<Mat2<T>>,
    inv_norm: Vec<Mat2<T>>,
    orthonormal: Vec<MatPoly<T>>,
}

impl<T: Scalar> PolyFamily<T> {
    pub fn new(params: Params<T>, max_degree: usize) -> Result<Self> {
        let monic: Vec<_> = (0..=max_degree).map(|w| monic_rw(w, &params)).collect();
        let (rec_a, rec_b): (Vec<_>, Vec<_>) =
            (0..=max_degree + 1).map(|w| recursion_matrices(w, &params)).unzip();
        let mut fam = Self {
            params,
            max_degree,
            monic,
            rec_a,
            rec_b,
            norm_sq: Vec::new(),
            quad_norm_sq: Vec::new(),
            norm: Vec::new(),
            inv_norm: Vec::new(),
            orthonormal: Vec::new(),
        };
        let m = params.weight_exponent();
        let rule = gauss_rule(max_degree + 3, m, m, -T::one(), T::one())?;
        fam.quad_norm_sq = fam.quadrature_norms(&rule);
        // ⟨R_w, R_w⟩ = A_w ⟨R_{w−1}, R_{w−1}⟩ keeps the norms consistent with the
        // recurrence to rounding; summed quadrature drifts by ~1e-13 at w ≈ 20.
        fam.norm_sq = vec![fam.quad_norm_sq[0]];
        for w in 1..=max_degree {
            let next = fam.rec_a[w] * fam.norm_sq[w - 1];
            fam.norm_sq.push(next);
        }
        for ns in &fam.norm_sq {
            let (d1, d2) = (ns.get(0, 0), ns.get(1, 1));
            if !(d1 > T::zero() && d2 > T::zero()) {
                return Err(Error::Domain(format!("norm matrix diagonal {d1}, {d2}")));
            }
            fam.norm.push(Mat2::diag(d1.sqrt(), d2.sqrt()));
            fam.inv_norm.push(Mat2::diag(T::one() / d1.sqrt(), T::one() / d2.sqrt()));
        }
        fam.orthonormal = fam
            .monic
            .iter()
            .zip(&fam.inv_norm)
            .map(|(r, s)| r.mul_left_const(s))
            .collect();
        Ok(fam)
    }

    fn quadrature_norms(&self, rule: &QuadRule<T>) -> Vec<Mat2<T>> {
        let weight_poly = crate::operators::weight_poly(&self.params);
        let mut acc = vec![Mat2::zero(); self.max_degree + 1];
        for (&x, &omega) in rule.nodes.iter().zip(&rule.weights) {
            let wx = weight_poly.eval(x);
            for (a, jet) in acc.iter_mut().zip(self.monic_jets(x)) {
                *a += (jet.value * wx * jet.value.transpose()).scale(omega);
            }
        }
        acc
    }

    pub fn params(&self) -> &Params<T> {
        &self.params
    }

    pub fn max_degree(&self) -> usize {
        self.max_degree
    }

    pub fn monic(&self, w: usize) -> &MatPoly<T> {
        &self.monic[w]
    }

    pub fn orthonormal(&self, w: usize) -> &MatPoly<T> {
        &self.orthonormal[w]
    }

    /// (A_w, B_w); available up to max_degree + 1.
    pub fn recursion(&self, w: usize) -> (Mat2<T>, Mat2<T>) {
        (self.rec_a[w], self.rec_b[w])
    }

    /// ⟨R_w, R_w⟩ on [−1, 1], from ⟨R_0, R_0⟩ and the recurrence.
    pub fn norm_sq(&self, w: usize) -> Mat2<T> {
        self.norm_sq[w]
    }

    /// ⟨R_w, R_w⟩ summed directly by Gauss quadrature.
    pub fn quadrature_norm_sq(&self, w: usize) -> Mat2<T> {
        self.quad_norm_sq[w]
    }

    /// ‖R_w‖, the positive diagonal square root of the norm matrix.
    pub fn norm(&self, w: usize) -> Mat2<T> {
        self.norm[w]
    }

    /// S_w = ‖R_w‖⁻¹.
    pub fn inv_norm(&self, w: usize) -> Mat2<T> {
        self.inv_norm[w]
    }

    /// Orthonormal recurrence (Ã_w, B̃_w) with Ã_w = S_w A_w S_{w−1}⁻¹ and
    /// B̃_w = ‖R_w‖⁻¹ B_w ‖R_w‖. Ã₀ is zero.
    pub fn orthonormal_recursion(&self, w: usize) -> (Mat2<T>, Mat2<T>) {
        let (a, b) = self.recursion(w);
        let at = if w == 0 {
            Mat2::zero()
        } else {
            self.inv_norm[w] * a * self.norm[w - 1]
        };
        (at, self.inv_norm[w] * b * self.norm[w])
    }

    /// Q_w(x) through [`monic_rw_value`].
    pub fn orthonormal_value(&self, w: usize, x: T) -> Result<Mat2<T>> {
        Ok(self.inv_norm(w) * monic_rw_value(w, &self.params, x)?)
    }

    /// ‖x R_w − A_w R_{w−1} − B_w R_w − R_{w+1}‖ at x, relative to max(1, ‖x R_w‖).
    pub fn recursion_residual(&self, w: usize, x: T) -> Result<T> {
        let r = monic_rw_value(w, &self.params, x)?;
        let prev = if w == 0 { Mat2::zero() } else { monic_rw_value(w - 1, &self.params, x)? };
        let next = monic_rw_value(w + 1, &self.params, x)?;
        let (a, b) = recursion_matrices(w, &self.params);
        let res = r.scale(x) - a * prev - b * r - next;
        Ok(res.frobenius() / r.scale(x).frobenius().max(T::one()))
    }

    /// ‖x Q_w − Ã_w Q_{w−1} − B̃_w Q_w − Ã*_{w+1} Q_{w+1}‖ at x; needs w < max_degree.
    pub fn orthonormal_recursion_residual(&self, w: usize, x: T) -> Result<T> {
        let q = self.orthonormal_value(w, x)?;
        let prev = if w == 0 { Mat2::zero() } else { self.orthonormal_value(w - 1, x)? };
        let next = self.orthonormal_value(w + 1, x)?;
        let (a, b) = self.orthonormal_recursion(w);
        let (a_next, _) = self.orthonormal_recursion(w + 1);
        Ok((q.scale(x) - a * prev - b * q - a_next.transpose() * next).frobenius())
    }

    /// Christoffel–Darboux defect
    /// ‖Q*_{w−1}(y) Ã*_w Q_w(x) − Q*_w(y) Ã_w Q_{w−1}(x) − (x − y) Σ_{k<w} Q*_k(y) Q_k(x)‖_F.
    pub fn christoffel_darboux_residual(&self, w: usize, x: T, y: T) -> Result<T> {
        if w == 0 || w > self.max_degree {
            return Err(Error::Domain(format!("Christoffel-Darboux degree {w}")));
        }
        let qx: Vec<_> = (0..=w).map(|k| self.orthonormal_value(k, x)).collect::<Result<_>>()?;
        let qy: Vec<_> = (0..=w).map(|k| self.orthonormal_value(k, y)).collect::<Result<_>>()?;
        let (a, _) = self.orthonormal_recursion(w);
        let sum = (0..w).fold(Mat2::zero(), |acc, k| acc + qy[k].transpose() * qx[k]);
        let lhs = qy[w - 1].transpose() * a.transpose() * qx[w] - qy[w].transpose() * a * qx[w - 1];
        Ok((lhs - sum.scale(x - y)).frobenius())
    }

    /// Values and derivatives of R_0..R_max at x, by the three-term recurrence.
    pub fn monic_jets(&self, x: T) -> Vec<Jet<T>> {
        let mut out: Vec<Jet<T>> = Vec::with_capacity(self.max_degree + 1);
        out.push(Jet {
            value: Mat2::identity(),
            d1: Mat2::zero(),
            d2: Mat2::zero(),
        });
        let xi = Mat2::scalar(x);
        let two = idx::<T>(2);
        for w in 0..self.max_degree {
            let (a, b) = self.recursion(w);
            let lead = xi - b;
            let cur = out[w];
            let prev = if w == 0 { Jet::default() } else { out[w - 1] };
            let pa = prev.left_mul(&a);
            out.push(Jet {
                value: lead * cur.value - pa.value,
                d1: cur.value + lead * cur.d1 - pa.d1,
                d2: cur.d1.scale(two) + lead * cur.d2 - pa.d2,
            });
        }
        out
    }

    /// Values and derivatives of Q_0..Q_max at x.
    pub fn orthonormal_jets(&self, x: T) -> Vec<Jet<T>> {
        self.monic_jets(x)
            .iter()
            .zip(&self.inv_norm)
            .map(|(j, s)| j.left_mul(s))
            .collect()
    }

    /// Quadrature/closed-form ratio of ⟨R_w, R_w⟩ for w = 0..=max_degree.
    pub fn norm_ratio_table(&self) -> Vec<NormRatio> {
        (0..=self.max_degree)
            .map(|w| {
                let quad = self.quad_norm_sq[w];
                let closed = norm_closed_form(w, &self.params);
                let f = |v: T| v.to_f64().unwrap_or(f64::NAN);
                let q = [f(quad.get(0, 0)), f(quad.get(1, 1))];
                let c = [f(closed.get(0, 0)), f(closed.get(1, 1))];
                NormRatio {
                    w,
                    quadrature: q,
                    closed_form: c,
                    ratio: [q[0] / c[0], q[1] / c[1]],
                }
            })
            .collect()
    }
}
