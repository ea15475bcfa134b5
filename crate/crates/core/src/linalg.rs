//! Small dense real linear algebra: 2x2 blocks, square matrices assembled
//! from them, and a cyclic Jacobi eigensolver for the symmetric case.

use std::ops::{Add, AddAssign, Deref, DerefMut, Mul, Neg, Sub};

use crate::error::{Error, Result};
use crate::scalar::{lit, Scalar};

/// Sweep budget of the Jacobi eigensolver.
pub const JACOBI_SWEEPS: usize = 100;

/// Default convergence threshold: off-diagonal Frobenius mass relative to ‖A‖_F.
pub const DEFAULT_EIG_TOL: f64 = 1e-14;

/// Relative asymmetry accepted by [`sym_eig`].
pub const SYMMETRY_TOL: f64 = 1e-10;

/// A real 2x2 matrix, row-major.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct Mat2<T> {
    pub m: [[T; 2]; 2],
}

impl<T: Scalar> Mat2<T> {
    pub fn new(a11: T, a12: T, a21: T, a22: T) -> Self {
        Self {
            m: [[a11, a12], [a21, a22]],
        }
    }

    pub fn zero() -> Self {
        Self::new(T::zero(), T::zero(), T::zero(), T::zero())
    }

    pub fn identity() -> Self {
        Self::diag(T::one(), T::one())
    }

    pub fn scalar(s: T) -> Self {
        Self::diag(s, s)
    }

    pub fn diag(a: T, d: T) -> Self {
        Self::new(a, T::zero(), T::zero(), d)
    }

    pub fn antidiag(b: T, c: T) -> Self {
        Self::new(T::zero(), b, c, T::zero())
    }

    /// The exchange matrix [[0, 1], [1, 0]].
    pub fn exchange() -> Self {
        Self::antidiag(T::one(), T::one())
    }

    /// Elementary matrix with a single one at (0, 0).
    pub fn e11() -> Self {
        Self::diag(T::one(), T::zero())
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.m[i][j]
    }

    pub fn transpose(&self) -> Self {
        Self::new(self.m[0][0], self.m[1][0], self.m[0][1], self.m[1][1])
    }

    pub fn scale(&self, s: T) -> Self {
        Self::new(
            self.m[0][0] * s,
            self.m[0][1] * s,
            self.m[1][0] * s,
            self.m[1][1] * s,
        )
    }

    pub fn det(&self) -> T {
        self.m[0][0] * self.m[1][1] - self.m[0][1] * self.m[1][0]
    }

    pub fn trace(&self) -> T {
        self.m[0][0] + self.m[1][1]
    }

    pub fn frobenius(&self) -> T {
        self.entries()
            .iter()
            .fold(T::zero(), |acc, &v| acc + v * v)
            .sqrt()
    }

    pub fn max_abs(&self) -> T {
        self.entries()
            .iter()
            .fold(T::zero(), |acc, &v| acc.max(v.abs()))
    }

    pub fn entries(&self) -> [T; 4] {
        [self.m[0][0], self.m[0][1], self.m[1][0], self.m[1][1]]
    }

    pub fn is_finite(&self) -> bool {
        self.entries().iter().all(|v| v.is_finite())
    }

    pub fn is_zero(&self) -> bool {
        self.entries().iter().all(|v| v.is_zero())
    }

    /// Inverse, rejecting |det| ≤ 1e-14·‖a‖_F².
    pub fn inverse(&self) -> Result<Self> {
        let det = self.det();
        let norm = self.frobenius();
        if !(det.abs() > lit::<T>(1e-14) * norm * norm) {
            return Err(Error::Singular {
                det: det.to_f64().unwrap_or(f64::NAN),
            });
        }
        let inv = T::one() / det;
        Ok(Self::new(
            self.m[1][1] * inv,
            -self.m[0][1] * inv,
            -self.m[1][0] * inv,
            self.m[0][0] * inv,
        ))
    }

    /// Row `r` times the matrix: `[x0, x1] · self`.
    pub fn row_mul(row: [T; 2], a: &Self) -> [T; 2] {
        [
            row[0] * a.m[0][0] + row[1] * a.m[1][0],
            row[0] * a.m[0][1] + row[1] * a.m[1][1],
        ]
    }

    /// Symmetric eigen-decomposition of a 2x2 matrix through the general solver.
    pub fn sym_eig(&self, tol: T) -> Result<SymEig<T>> {
        sym_eig(&SquareMat::from(*self), tol)
    }
}

impl<T: Scalar> Add for Mat2<T> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(
            self.m[0][0] + o.m[0][0],
            self.m[0][1] + o.m[0][1],
            self.m[1][0] + o.m[1][0],
            self.m[1][1] + o.m[1][1],
        )
    }
}

impl<T: Scalar> AddAssign for Mat2<T> {
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

impl<T: Scalar> Sub for Mat2<T> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        self + (-o)
    }
}

impl<T: Scalar> Neg for Mat2<T> {
    type Output = Self;
    fn neg(self) -> Self {
        self.scale(-T::one())
    }
}

impl<T: Scalar> Mul for Mat2<T> {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        let a = &self.m;
        let b = &o.m;
        Self::new(
            a[0][0] * b[0][0] + a[0][1] * b[1][0],
            a[0][0] * b[0][1] + a[0][1] * b[1][1],
            a[1][0] * b[0][0] + a[1][1] * b[1][0],
            a[1][0] * b[0][1] + a[1][1] * b[1][1],
        )
    }
}

/// Dense square matrix, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct SquareMat<T> {
    dim: usize,
    data: Vec<T>,
}

impl<T: Scalar> SquareMat<T> {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: vec![T::zero(); dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn from_fn(dim: usize, f: impl Fn(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(dim * dim);
        for i in 0..dim {
            for j in 0..dim {
                data.push(f(i, j));
            }
        }
        Self { dim, data }
    }

    pub fn from_diag(d: &[T]) -> Self {
        let mut m = Self::zeros(d.len());
        for (i, &v) in d.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn column(&self, j: usize) -> Vec<T> {
        (0..self.dim).map(|i| self[(i, j)]).collect()
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.dim, |i, j| self[(j, i)])
    }

    pub fn frobenius(&self) -> T {
        self.data
            .iter()
            .fold(T::zero(), |acc, &v| acc + v * v)
            .sqrt()
    }

    pub fn trace(&self) -> T {
        (0..self.dim).fold(T::zero(), |acc, i| acc + self[(i, i)])
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |acc, &v| acc.max(v.abs()))
    }

    /// ‖A − Aᵀ‖_F / ‖A‖_F (zero for the zero matrix).
    pub fn asymmetry(&self) -> T {
        let norm = self.frobenius();
        if norm.is_zero() {
            return T::zero();
        }
        let mut acc = T::zero();
        for i in 0..self.dim {
            for j in 0..self.dim {
                let d = self[(i, j)] - self[(j, i)];
                acc = acc + d * d;
            }
        }
        acc.sqrt() / norm
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim, "matmul dimension mismatch");
        let n = self.dim;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self[(i, k)];
                if a.is_zero() {
                    continue;
                }
                for j in 0..n {
                    out.data[i * n + j] = out.data[i * n + j] + a * other.data[k * n + j];
                }
            }
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim);
        Self {
            dim: self.dim,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| a - b)
                .collect(),
        }
    }

    /// A·v.
    pub fn mul_vec(&self, v: &[T]) -> Vec<T> {
        assert_eq!(v.len(), self.dim);
        (0..self.dim)
            .map(|i| {
                self.row(i)
                    .iter()
                    .zip(v)
                    .fold(T::zero(), |acc, (&a, &b)| acc + a * b)
            })
            .collect()
    }

    /// vᵀ·A (row-vector convention).
    pub fn vec_mul(&self, v: &[T]) -> Vec<T> {
        assert_eq!(v.len(), self.dim);
        let mut out = vec![T::zero(); self.dim];
        for (i, &vi) in v.iter().enumerate() {
            for (o, &a) in out.iter_mut().zip(self.row(i)) {
                *o = *o + vi * a;
            }
        }
        out
    }
}

impl<T> std::ops::Index<(usize, usize)> for SquareMat<T> {
    type Output = T;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.dim + j]
    }
}

impl<T> std::ops::IndexMut<(usize, usize)> for SquareMat<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.dim + j]
    }
}

impl<T: Scalar> From<Mat2<T>> for SquareMat<T> {
    fn from(a: Mat2<T>) -> Self {
        Self {
            dim: 2,
            data: a.entries().to_vec(),
        }
    }
}

/// Square matrix of even dimension 2(N+1), addressed in 2x2 blocks.
///
/// Block (w, m) occupies rows 2w..2w+1 and columns 2m..2m+1, so the flat
/// index of component r of block w is 2w + r.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockMat<T>(SquareMat<T>);

impl<T: Scalar> BlockMat<T> {
    pub fn zeros(blocks: usize) -> Self {
        Self(SquareMat::zeros(2 * blocks))
    }

    pub fn from_square(m: SquareMat<T>) -> Result<Self> {
        if m.dim() == 0 || m.dim() % 2 != 0 {
            return Err(Error::Dimension(format!(
                "block matrix needs an even positive dimension, got {}",
                m.dim()
            )));
        }
        Ok(Self(m))
    }

    pub fn from_blocks(blocks: usize, f: impl Fn(usize, usize) -> Mat2<T>) -> Self {
        let mut out = Self::zeros(blocks);
        for w in 0..blocks {
            for m in 0..blocks {
                out.set_block(w, m, f(w, m));
            }
        }
        out
    }

    pub fn blocks(&self) -> usize {
        self.0.dim() / 2
    }

    pub fn block(&self, w: usize, m: usize) -> Mat2<T> {
        let s = &self.0;
        Mat2::new(
            s[(2 * w, 2 * m)],
            s[(2 * w, 2 * m + 1)],
            s[(2 * w + 1, 2 * m)],
            s[(2 * w + 1, 2 * m + 1)],
        )
    }

    pub fn set_block(&mut self, w: usize, m: usize, b: Mat2<T>) {
        for i in 0..2 {
            for j in 0..2 {
                self.0[(2 * w + i, 2 * m + j)] = b.m[i][j];
            }
        }
    }

    pub fn into_inner(self) -> SquareMat<T> {
        self.0
    }
}

impl<T> Deref for BlockMat<T> {
    type Target = SquareMat<T>;
    fn deref(&self) -> &SquareMat<T> {
        &self.0
    }
}

impl<T> DerefMut for BlockMat<T> {
    fn deref_mut(&mut self) -> &mut SquareMat<T> {
        &mut self.0
    }
}

/// Result of [`sym_eig`]: ascending eigenvalues and the matching
/// orthonormal eigenvectors stored as columns.
#[derive(Clone, Debug)]
pub struct SymEig<T> {
    pub values: Vec<T>,
    pub vectors: SquareMat<T>,
    pub sweeps: usize,
}

impl<T: Scalar> SymEig<T> {
    pub fn vector(&self, k: usize) -> Vec<T> {
        self.vectors.column(k)
    }
}

/// Cyclic Jacobi eigen-decomposition of a symmetric matrix.
///
/// Converges when the off-diagonal Frobenius mass drops below
/// `tol·‖A‖_F` (never below ten machine epsilons). Eigenvalues are sorted
/// ascending and each eigenvector is signed so that its first component of
/// magnitude above 1e-12 is positive.
pub fn sym_eig<T: Scalar>(a: &SquareMat<T>, tol: T) -> Result<SymEig<T>> {
    let n = a.dim();
    let asym = a.asymmetry();
    if asym > lit(SYMMETRY_TOL) {
        return Err(Error::NotSymmetric {
            asymmetry: asym.to_f64().unwrap_or(f64::NAN),
        });
    }
    let half = lit::<T>(0.5);
    let mut s = SquareMat::from_fn(n, |i, j| (a[(i, j)] + a[(j, i)]) * half);
    let mut v = SquareMat::identity(n);
    let norm = s.frobenius();
    let threshold = tol.max(T::epsilon() * lit(10.0)) * norm;

    let off_mass = |s: &SquareMat<T>| {
        let mut acc = T::zero();
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    acc = acc + s[(i, j)] * s[(i, j)];
                }
            }
        }
        acc.sqrt()
    };

    let mut sweeps = 0;
    let mut converged = norm.is_zero();
    while !converged {
        if off_mass(&s) <= threshold {
            converged = true;
            break;
        }
        if sweeps == JACOBI_SWEEPS {
            break;
        }
        sweeps += 1;
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = s[(p, q)];
                if apq.is_zero() {
                    continue;
                }
                let theta = (s[(q, q)] - s[(p, p)]) / (apq + apq);
                let t = if theta.abs() > lit(1e150) {
                    half / theta
                } else {
                    let sign = if theta < T::zero() { -T::one() } else { T::one() };
                    sign / (theta.abs() + (theta * theta + T::one()).sqrt())
                };
                let c = T::one() / (t * t + T::one()).sqrt();
                let sn = t * c;
                for k in 0..n {
                    let skp = s[(k, p)];
                    let skq = s[(k, q)];
                    s[(k, p)] = c * skp - sn * skq;
                    s[(k, q)] = sn * skp + c * skq;
                }
                for k in 0..n {
                    let spk = s[(p, k)];
                    let sqk = s[(q, k)];
                    s[(p, k)] = c * spk - sn * sqk;
                    s[(q, k)] = sn * spk + c * sqk;
                }
                s[(p, q)] = T::zero();
                s[(q, p)] = T::zero();
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - sn * vkq;
                    v[(k, q)] = sn * vkp + c * vkq;
                }
            }
        }
    }
    if !converged {
        return Err(Error::NoConvergence {
            budget: JACOBI_SWEEPS,
            off_diagonal: (off_mass(&s) / norm).to_f64().unwrap_or(f64::NAN),
        });
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| s[(i, i)].partial_cmp(&s[(j, j)]).expect("finite eigenvalues"));
    let values: Vec<T> = order.iter().map(|&i| s[(i, i)]).collect();
    let mut vectors = SquareMat::zeros(n);
    let cut = lit::<T>(1e-12);
    for (col, &src) in order.iter().enumerate() {
        let flip = (0..n)
            .map(|k| v[(k, src)])
            .find(|x| x.abs() > cut)
            .is_some_and(|x| x < T::zero());
        for k in 0..n {
            let x = v[(k, src)];
            vectors[(k, col)] = if flip { -x } else { x };
        }
    }
    Ok(SymEig {
        values,
        vectors,
        sweeps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_sym(n: usize, seed: u64) -> SquareMat<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut a = SquareMat::zeros(n);
        for i in 0..n {
            for j in i..n {
                let x: f64 = rng.random_range(-1.0..1.0);
                a[(i, j)] = x;
                a[(j, i)] = x;
            }
        }
        a
    }

    /// det(A - λI) by Gaussian elimination with partial pivoting.
    fn char_poly(a: &SquareMat<f64>, lambda: f64) -> f64 {
        let n = a.dim();
        let mut m: Vec<Vec<f64>> = (0..n)
            .map(|i| (0..n).map(|j| a[(i, j)] - if i == j { lambda } else { 0.0 }).collect())
            .collect();
        let mut det = 1.0;
        for c in 0..n {
            let piv = (c..n)
                .max_by(|&i, &j| m[i][c].abs().partial_cmp(&m[j][c].abs()).unwrap())
                .unwrap();
            if m[piv][c] == 0.0 {
                return 0.0;
            }
            if piv != c {
                m.swap(piv, c);
                det = -det;
            }
            det *= m[c][c];
            for r in (c + 1)..n {
                let f = m[r][c] / m[c][c];
                for k in c..n {
                    m[r][k] -= f * m[c][k];
                }
            }
        }
        det
    }

    /// Roots of the characteristic polynomial by sign scan plus bisection.
    fn char_roots(a: &SquareMat<f64>) -> Vec<f64> {
        let bound = a.frobenius() + 1.0;
        let steps = 20_000;
        let h = 2.0 * bound / steps as f64;
        let mut roots = Vec::new();
        let mut lo = -bound;
        let mut flo = char_poly(a, lo);
        for k in 1..=steps {
            let hi = -bound + k as f64 * h;
            let fhi = char_poly(a, hi);
            if flo == 0.0 || flo.signum() != fhi.signum() {
                let (mut l, mut r, mut fl) = (lo, hi, flo);
                for _ in 0..200 {
                    let mid = 0.5 * (l + r);
                    let fm = char_poly(a, mid);
                    if fm == 0.0 {
                        l = mid;
                        r = mid;
                        break;
                    }
                    if fm.signum() == fl.signum() {
                        l = mid;
                        fl = fm;
                    } else {
                        r = mid;
                    }
                }
                roots.push(0.5 * (l + r));
            }
            lo = hi;
            flo = fhi;
        }
        roots
    }

    #[test]
    fn identity_eigenvalues() {
        let e = sym_eig(&SquareMat::<f64>::identity(4), 1e-14).unwrap();
        assert_eq!(e.values, vec![1.0; 4]);
    }

    #[test]
    fn diagonal_eigenpairs() {
        let a = SquareMat::from_diag(&[2.0, -3.0, 5.0]);
        let e = sym_eig(&a, 1e-14).unwrap();
        assert_eq!(e.values, vec![-3.0, 2.0, 5.0]);
        assert_eq!(e.vector(0), vec![0.0, 1.0, 0.0]);
        assert_eq!(e.vector(1), vec![1.0, 0.0, 0.0]);
        assert_eq!(e.vector(2), vec![0.0, 0.0, 1.0]);
    }

    #[test]
    fn random_matrix_matches_characteristic_roots() {
        let a = random_sym(4, 7);
        let e = sym_eig(&a, 1e-14).unwrap();
        let roots = char_roots(&a);
        assert_eq!(roots.len(), 4, "bisection oracle found {roots:?}");
        for (got, want) in e.values.iter().zip(&roots) {
            assert!((got - want).abs() < 1e-10, "{got} vs {want}");
        }
    }

    #[test]
    fn reconstruction_and_orthogonality() {
        for seed in 0..5 {
            let a = random_sym(9, seed);
            let e = sym_eig(&a, 1e-14).unwrap();
            let v = &e.vectors;
            let rebuilt = v.matmul(&SquareMat::from_diag(&e.values)).matmul(&v.transpose());
            assert!(rebuilt.sub(&a).frobenius() <= 1e-10 * a.frobenius());
            let gram = v.transpose().matmul(v);
            assert!(gram.sub(&SquareMat::identity(9)).max_abs() < 1e-12);
            let sum: f64 = e.values.iter().sum();
            assert!((sum - a.trace()).abs() <= 1e-10 * a.frobenius());
            for k in 0..9 {
                let x = e.vector(k);
                let ax = a.mul_vec(&x);
                let res: f64 = ax
                    .iter()
                    .zip(&x)
                    .map(|(p, q)| (p - e.values[k] * q).powi(2))
                    .sum::<f64>()
                    .sqrt();
                assert!(res <= 1e-13 * a.frobenius());
            }
        }
    }

    #[test]
    fn rejects_asymmetric_input() {
        let mut a = SquareMat::<f64>::identity(3);
        a[(0, 2)] = 0.5;
        match sym_eig(&a, 1e-14) {
            Err(Error::NotSymmetric { asymmetry }) => assert!(asymmetry > 0.1),
            other => panic!("expected asymmetry error, got {other:?}"),
        }
    }

    #[test]
    fn mat2_basics() {
        let inv = Mat2::diag(2.0, 4.0).inverse().unwrap();
        assert_eq!(inv, Mat2::diag(0.5, 0.25));
        assert_eq!(Mat2::<f64>::identity().frobenius(), 2f64.sqrt());
        let e0 = Mat2::new(0.0, 4.0, 2.0, 0.0);
        assert_eq!(e0 * e0, Mat2::diag(8.0, 8.0));
        assert!(matches!(
            Mat2::new(1.0, 2.0, 2.0, 4.0).inverse(),
            Err(Error::Singular { .. })
        ));
    }

    #[test]
    fn mat2_eig_single_precision() {
        let e = Mat2::new(2.0_f32, 1.0, 1.0, 2.0).sym_eig(1e-6).unwrap();
        assert!((e.values[0] - 1.0).abs() < 1e-6);
        assert!((e.values[1] - 3.0).abs() < 1e-6);
    }

    #[test]
    fn block_accessors() {
        let b = BlockMat::from_blocks(2, |w, m| Mat2::scalar((10 * w + m) as f64));
        assert_eq!(b.block(1, 0), Mat2::scalar(10.0));
        assert_eq!(b[(3, 0)], 0.0);
        assert_eq!(b[(2, 0)], 10.0);
        assert!(BlockMat::from_square(SquareMat::<f64>::zeros(3)).is_err());
    }
}
