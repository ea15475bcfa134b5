//! Time-and-band limiting on span{Q_0, …, Q_N}.
//!
//! Functions are 1×2 rows f = Σ C_w Q_w with coefficient rows C_w, flattened
//! as index 2w + r. Both operators act on the right, so S becomes c ↦ cM and
//! D̃ becomes c ↦ cB with
//!
//! * M_{m,j} = ⟨Q_m, Q_j⟩_α = ∫_{−1}^{α} Q_m W Q_j* (the truncated Gram matrix),
//! * B_{w,j} = ⟨Q_w D̃, Q_j⟩ over the full interval.

use std::sync::OnceLock;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{sym_eig, BlockMat, Mat2, SquareMat};
use crate::matpoly::{Jet, MatPoly, Params, PolyFamily};
use crate::operators::{op_dtilde_mutated, weight_poly, Mutation, RightDiffOp};
use crate::quadrature::{gauss_rule, Domain, WeightedQuadrature};
use crate::scalar::{idx, lit, Scalar};

/// Tolerance on span invariance, tridiagonality and symmetry of B, relative
/// to its largest entry.
pub const B_STRUCTURE_TOL: f64 = 1e-10;
/// Relative gap below which B-eigenvalues are treated as one cluster.
pub const CLUSTER_TOL: f64 = 1e-8;

/// Parameters, band limit N and cap boundary α.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TbConfig<T> {
    pub params: Params<T>,
    #[serde(rename = "N")]
    pub big_n: usize,
    pub alpha: T,
    /// Minimum quadrature order; `None` lets the integrator choose.
    pub quad_order: Option<usize>,
    pub mutation: Mutation,
}

impl<T: Scalar> TbConfig<T> {
    /// Requires −1 < α < 1.
    pub fn new(params: Params<T>, big_n: usize, alpha: T) -> Result<Self> {
        if !(alpha > -T::one() && alpha < T::one()) {
            return Err(Error::InvalidParams(format!("alpha = {alpha} must lie in (-1, 1)")));
        }
        Ok(Self::diagnostic(params, big_n, alpha))
    }

    /// Like [`TbConfig::new`] but without the range check on α, so α = 1
    /// (the whole interval) can be used for sanity checks.
    pub fn diagnostic(params: Params<T>, big_n: usize, alpha: T) -> Self {
        Self {
            params,
            big_n,
            alpha,
            quad_order: None,
            mutation: Mutation::None,
        }
    }

    pub fn with_quad_order(mut self, order: Option<usize>) -> Self {
        self.quad_order = order;
        self
    }

    pub fn with_mutation(mut self, mutation: Mutation) -> Self {
        self.mutation = mutation;
        self
    }

    pub fn dim(&self) -> usize {
        2 * (self.big_n + 1)
    }
}

/// Coefficients (C_0, …, C_N) of a row function, flattened.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CoeffVec<T> {
    data: Vec<T>,
}

impl<T: Scalar> CoeffVec<T> {
    pub fn new(data: Vec<T>) -> Result<Self> {
        if data.len() % 2 != 0 || data.is_empty() {
            return Err(Error::Dimension(format!("coefficient vector of length {}", data.len())));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("non-finite coefficient".into()));
        }
        Ok(Self { data })
    }

    pub fn zeros(blocks: usize) -> Self {
        Self { data: vec![T::zero(); 2 * blocks] }
    }

    /// The coefficient vector of row r of Q_w.
    pub fn unit(blocks: usize, w: usize, r: usize) -> Self {
        let mut c = Self::zeros(blocks);
        c.data[2 * w + r] = T::one();
        c
    }

    pub fn blocks(&self) -> usize {
        self.data.len() / 2
    }

    pub fn block(&self, w: usize) -> [T; 2] {
        [self.data[2 * w], self.data[2 * w + 1]]
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn norm(&self) -> T {
        self.data.iter().fold(T::zero(), |acc, &v| acc + v * v).sqrt()
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self {
            data: self.data.iter().zip(&other.data).map(|(a, b)| *a - *b).collect(),
        }
    }

    /// c ↦ c·A for a flat matrix of matching size.
    pub fn right_mul(&self, a: &SquareMat<T>) -> Self {
        Self { data: a.vec_mul(&self.data) }
    }
}

/// A 1×2 row polynomial, coefficient j multiplying x^j.
#[derive(Clone, Debug, PartialEq)]
pub struct RowPoly<T> {
    pub coeffs: Vec<[T; 2]>,
}

impl<T: Scalar> RowPoly<T> {
    /// Row r of a matrix polynomial.
    pub fn from_row(f: &MatPoly<T>, r: usize) -> Self {
        Self {
            coeffs: f.coeffs().iter().map(|c| [c.get(r, 0), c.get(r, 1)]).collect(),
        }
    }

    pub fn eval(&self, x: T) -> [T; 2] {
        self.coeffs.iter().rev().fold([T::zero(); 2], |acc, c| {
            [acc[0] * x + c[0], acc[1] * x + c[1]]
        })
    }

    pub fn degree(&self) -> i64 {
        self.coeffs
            .iter()
            .rposition(|c| !(c[0].is_zero() && c[1].is_zero()))
            .map_or(-1, |d| d as i64)
    }
}

/// Span invariance and band structure of B.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct BStructure {
    /// Largest entry of the Q_N → Q_{N+1} coupling block.
    pub coupling: f64,
    /// Largest entry of blocks with |w − j| ≥ 2.
    pub off_band: f64,
    /// ‖B − Bᵀ‖_F / ‖B‖_F.
    pub asymmetry: f64,
    /// Largest entry of B, the scale for the first two numbers.
    pub scale: f64,
}

/// One prolate mode: an eigenvector of B with its Rayleigh value under M.
#[derive(Clone, Debug, Serialize)]
pub struct Mode<T> {
    pub index: usize,
    pub b_eig: f64,
    pub s_eig: f64,
    pub cross_residual: f64,
    pub cluster: usize,
    #[serde(skip)]
    pub vector: CoeffVec<T>,
}

/// Modes sorted by decreasing s-eigenvalue plus global diagnostics.
#[derive(Clone, Debug, Serialize)]
pub struct SpectrumReport<T> {
    pub modes: Vec<Mode<T>>,
    pub commutator_residual: f64,
    /// Smallest gap between B-eigenvalues over the largest |B-eigenvalue|.
    pub min_gap_b: f64,
    /// Smallest gap between s-eigenvalues over the largest s-eigenvalue.
    pub min_gap_m: f64,
    /// min_gap_b / max(min_gap_m, machine epsilon).
    pub contrast: f64,
    /// Clusters of B-eigenvalues of size > 1.
    pub degenerate_clusters: Vec<usize>,
    /// Clusters where M could not be diagonalized to tolerance.
    pub flagged_clusters: Vec<usize>,
}

impl<T: Scalar> SpectrumReport<T> {
    pub fn max_cross_residual(&self) -> f64 {
        self.modes.iter().fold(0.0, |acc, m| acc.max(m.cross_residual))
    }

    /// Number of leading modes with s-eigenvalue ≥ threshold.
    pub fn modes_above(&self, threshold: f64) -> usize {
        self.modes.iter().take_while(|m| m.s_eig >= threshold).count()
    }
}

/// Sampled observations of a row function on the cap: values at cap Gauss
/// nodes together with the matrix quadrature weights ω_i·W(x_i).
#[derive(Clone, Debug)]
pub struct Samples<T> {
    pub x: Vec<T>,
    pub values: Vec<[T; 2]>,
    pub weights: Vec<Mat2<T>>,
}

#[derive(Clone, Debug, Serialize)]
pub struct Reconstruction<T> {
    pub coeffs: CoeffVec<T>,
    pub modes_kept: usize,
    pub smallest_kept_s: f64,
    /// Relative L²(W) error on [−1, 1], when the truth is known.
    pub relative_error: Option<f64>,
    pub warnings: Vec<String>,
}

/// Which modes enter a reconstruction.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ModeSelection {
    All,
    Count(usize),
    /// Modes with s-eigenvalue at or above the threshold.
    Threshold(f64),
}

/// Everything needed for one configuration, with M and B built on demand.
#[derive(Debug)]
pub struct TimeBand<T> {
    config: TbConfig<T>,
    family: PolyFamily<T>,
    quad: WeightedQuadrature<T>,
    domain: Domain<T>,
    dtilde: RightDiffOp<T>,
    m: OnceLock<BlockMat<T>>,
    b: OnceLock<(BlockMat<T>, BStructure)>,
}

fn f64_of<T: Scalar>(v: T) -> f64 {
    v.to_f64().unwrap_or(f64::NAN)
}

impl<T: Scalar> TimeBand<T> {
    pub fn new(config: TbConfig<T>) -> Result<Self> {
        let domain = Domain::from_alpha(config.alpha)?;
        let dtilde_alpha = config.alpha.min(T::one() - T::epsilon());
        Ok(Self {
            family: PolyFamily::new(config.params, config.big_n + 1)?,
            quad: WeightedQuadrature::new(config.params),
            domain,
            dtilde: op_dtilde_mutated(&config.params, config.big_n, dtilde_alpha, config.mutation)?,
            config,
            m: OnceLock::new(),
            b: OnceLock::new(),
        })
    }

    pub fn config(&self) -> &TbConfig<T> {
        &self.config
    }

    pub fn family(&self) -> &PolyFamily<T> {
        &self.family
    }

    pub fn dtilde(&self) -> &RightDiffOp<T> {
        &self.dtilde
    }

    fn blocks(&self) -> usize {
        self.config.big_n + 1
    }

    fn check_x(x: T) -> Result<()> {
        if x.abs() <= T::one() {
            Ok(())
        } else {
            Err(Error::Domain(format!("x = {x} outside [-1, 1]")))
        }
    }

    /// Jets of Q_0..Q_{N+1} at x.
    fn jets(&self, x: T) -> Vec<Jet<T>> {
        self.family.orthonormal_jets(x)
    }

    /// k(x, y) = Σ_{w≤N} Q_w(x)* Q_w(y).
    pub fn kernel_eval(&self, x: T, y: T) -> Result<Mat2<T>> {
        Self::check_x(x)?;
        Self::check_x(y)?;
        let (jx, jy) = (self.jets(x), self.jets(y));
        Ok((0..self.blocks()).fold(Mat2::zero(), |acc, w| acc + jx[w].value.transpose() * jy[w].value))
    }

    /// f(x) = Σ C_w Q_w(x), evaluated through the recurrence.
    pub fn eval_coeffs(&self, c: &CoeffVec<T>, x: T) -> [T; 2] {
        let jets = self.jets(x);
        (0..c.blocks().min(self.blocks())).fold([T::zero(); 2], |acc, w| {
            let r = Mat2::row_mul(c.block(w), &jets[w].value);
            [acc[0] + r[0], acc[1] + r[1]]
        })
    }

    /// Coefficients ⟨f, Q_w⟩ (w ≤ N) of a row function of polynomial degree
    /// `degree`; functions outside the span are projected onto it.
    pub fn analysis_fn(&self, degree: usize, f: impl Fn(T) -> [T; 2]) -> Result<CoeffVec<T>> {
        let nb = self.blocks();
        let deg = degree + self.config.big_n + 2;
        let order = (deg / 2 + 1).max(self.config.quad_order.unwrap_or(1));
        let m = self.config.params.weight_exponent();
        let rule = gauss_rule(order, m, m, -T::one(), T::one())?;
        let wp = weight_poly(&self.config.params);
        let mut out = vec![T::zero(); 2 * nb];
        for (&x, &omega) in rule.nodes.iter().zip(&rule.weights) {
            let fw = Mat2::row_mul(f(x), &wp.eval(x));
            for (w, jet) in self.jets(x).iter().take(nb).enumerate() {
                let q = jet.value;
                for s in 0..2 {
                    out[2 * w + s] = out[2 * w + s] + omega * (fw[0] * q.get(s, 0) + fw[1] * q.get(s, 1));
                }
            }
        }
        CoeffVec::new(out)
    }

    pub fn analysis(&self, f: &RowPoly<T>) -> Result<CoeffVec<T>> {
        self.analysis_fn(f.degree().max(0) as usize, |x| f.eval(x))
    }

    /// Σ C_w Q_w as an explicit row polynomial.
    pub fn synthesis(&self, c: &CoeffVec<T>) -> RowPoly<T> {
        let mut coeffs = vec![[T::zero(); 2]; self.blocks()];
        for w in 0..c.blocks().min(self.blocks()) {
            for (j, q) in self.family.orthonormal(w).coeffs().iter().enumerate() {
                let r = Mat2::row_mul(c.block(w), q);
                coeffs[j] = [coeffs[j][0] + r[0], coeffs[j][1] + r[1]];
            }
        }
        RowPoly { coeffs }
    }

    fn compute_m(&self) -> Result<BlockMat<T>> {
        let nb = self.blocks();
        let min_order = self.config.quad_order.unwrap_or(1);
        let rows: Vec<Vec<T>> = (0..nb)
            .into_par_iter()
            .map(|mrow| {
                self.quad.integrate(self.domain, 2 * self.config.big_n + 2, min_order, |x, weff| {
                    let jets = self.jets(x);
                    let left = jets[mrow].value * *weff;
                    (0..nb)
                        .flat_map(|j| (left * jets[j].value.transpose()).entries())
                        .collect()
                })
            })
            .collect::<Result<_>>()?;
        let mut m = BlockMat::zeros(nb);
        for (mrow, row) in rows.iter().enumerate() {
            for j in 0..nb {
                let e = &row[4 * j..4 * j + 4];
                m.set_block(mrow, j, Mat2::new(e[0], e[1], e[2], e[3]));
            }
        }
        // Symmetrize away quadrature rounding.
        let sym = SquareMat::from_fn(m.dim(), |i, j| (m[(i, j)] + m[(j, i)]) / idx(2));
        BlockMat::from_square(sym)
    }

    /// The truncated Gram matrix M, computed once.
    pub fn m(&self) -> Result<&BlockMat<T>> {
        if let Some(m) = self.m.get() {
            return Ok(m);
        }
        let m = self.compute_m()?;
        Ok(self.m.get_or_init(|| m))
    }

    /// c ↦ cM.
    pub fn apply_s(&self, c: &CoeffVec<T>) -> Result<CoeffVec<T>> {
        Ok(c.right_mul(self.m()?))
    }

    /// The same map by integrating f(y) W(y) k(y, x) over the cap and
    /// expanding the result back in {Q_w}.
    pub fn apply_s_direct(&self, c: &CoeffVec<T>) -> Result<CoeffVec<T>> {
        let nb = self.blocks();
        let min_order = self.config.quad_order.unwrap_or(1);
        let deg = 2 * self.config.big_n;
        let full_order = deg / 2 + 2;
        let m = self.config.params.weight_exponent();
        let outer = gauss_rule(full_order, m, m, -T::one(), T::one())?;
        // Cap integral of f(y)W(y)k(y, x) for every outer node x at once.
        let sx: Vec<Vec<Jet<T>>> = outer.nodes.iter().map(|&x| self.jets(x)).collect();
        let vals = self.quad.integrate(self.domain, deg + 2, min_order, |y, weff| {
            let jy = self.jets(y);
            let fy = (0..nb).fold([T::zero(); 2], |acc, w| {
                let r = Mat2::row_mul(c.block(w), &jy[w].value);
                [acc[0] + r[0], acc[1] + r[1]]
            });
            let fw = Mat2::row_mul(fy, weff);
            sx.iter()
                .flat_map(|jx| {
                    let k = (0..nb).fold(Mat2::zero(), |acc, w| acc + jy[w].value.transpose() * jx[w].value);
                    Mat2::row_mul(fw, &k)
                })
                .collect()
        })?;
        let wp = weight_poly(&self.config.params);
        let mut out = vec![T::zero(); 2 * nb];
        for (i, (&x, &omega)) in outer.nodes.iter().zip(&outer.weights).enumerate() {
            let fw = Mat2::row_mul([vals[2 * i], vals[2 * i + 1]], &wp.eval(x));
            for w in 0..nb {
                let q = sx[i][w].value;
                for s in 0..2 {
                    out[2 * w + s] = out[2 * w + s] + omega * (fw[0] * q.get(s, 0) + fw[1] * q.get(s, 1));
                }
            }
        }
        CoeffVec::new(out)
    }

    fn compute_b(&self) -> Result<(BlockMat<T>, BStructure)> {
        let nb = self.blocks();
        // Q_w D̃ has degree ≤ w + 1; paired with Q_j (j ≤ N + 1) and the
        // quadratic weight matrix the integrand degree is ≤ 2N + 5.
        let order = self.config.big_n + 4;
        let m = self.config.params.weight_exponent();
        let rule = gauss_rule(order, m, m, -T::one(), T::one())?;
        let wp = weight_poly(&self.config.params);
        let nodes: Vec<(T, Vec<Jet<T>>, Mat2<T>)> = rule
            .nodes
            .iter()
            .zip(&rule.weights)
            .map(|(&x, &omega)| (x, self.jets(x), wp.eval(x).scale(omega)))
            .collect();
        let rows: Vec<Vec<Mat2<T>>> = (0..nb)
            .into_par_iter()
            .map(|w| {
                let mut row = vec![Mat2::zero(); nb + 1];
                for (x, jets, wx) in &nodes {
                    let left = self.dtilde.apply_jet(&jets[w], *x) * *wx;
                    for (j, acc) in row.iter_mut().enumerate() {
                        *acc += left * jets[j].value.transpose();
                    }
                }
                row
            })
            .collect();
        let mut b = BlockMat::zeros(nb);
        let mut off_band = T::zero();
        for (w, row) in rows.iter().enumerate() {
            for j in 0..nb {
                b.set_block(w, j, row[j]);
                if w.abs_diff(j) >= 2 {
                    off_band = off_band.max(row[j].max_abs());
                }
            }
        }
        let scale = b.max_abs().max(T::one());
        let coupling = rows[nb - 1][nb].max_abs();
        let structure = BStructure {
            coupling: f64_of(coupling / scale),
            off_band: f64_of(off_band / scale),
            asymmetry: f64_of(b.asymmetry()),
            scale: f64_of(scale),
        };
        if structure.coupling > B_STRUCTURE_TOL {
            return Err(Error::SpanInvariance {
                coupling: structure.coupling,
            });
        }
        Ok((b, structure))
    }

    /// Galerkin matrix B of D̃ with its structure diagnostics, computed once.
    /// Fails if D̃ does not leave span{Q_0..Q_N} invariant.
    pub fn b(&self) -> Result<&(BlockMat<T>, BStructure)> {
        if let Some(b) = self.b.get() {
            return Ok(b);
        }
        let b = self.compute_b()?;
        Ok(self.b.get_or_init(|| b))
    }

    /// ‖MB − BM‖_F / (‖M‖_F ‖B‖_F).
    pub fn commutator_residual(&self) -> Result<f64> {
        let m = self.m()?;
        let (b, _) = self.b()?;
        let c = m.matmul(b).sub(&b.matmul(m));
        Ok(f64_of(c.frobenius() / (m.frobenius() * b.frobenius())))
    }

    /// ‖(k(x,y)*) D̃_x − (k(x,y) D̃_y)*‖_F, with k(·, y) and k(x, ·) expanded
    /// as matrix polynomials from the coefficients of Q_w.
    pub fn kernel_identity_residual(&self, x: T, y: T) -> Result<T> {
        Self::check_x(x)?;
        Self::check_x(y)?;
        // k(x, y)* as a polynomial in x with y frozen: Σ Q_w(y)* Q_w(x).
        let in_x = self.kernel_poly(y);
        // k(x, y) as a polynomial in y with x frozen: Σ Q_w(x)* Q_w(y).
        let in_y = self.kernel_poly(x);
        let lhs = self.dtilde.apply_right(&in_x).eval(x);
        let rhs = self.dtilde.apply_right(&in_y).eval(y).transpose();
        Ok((lhs - rhs).frobenius())
    }

    /// z ↦ Σ_{w≤N} Q_w(t)* Q_w(z) as a matrix polynomial in z.
    fn kernel_poly(&self, t: T) -> MatPoly<T> {
        let jets = self.jets(t);
        (0..self.blocks()).fold(MatPoly::zero(), |acc, w| {
            acc.add(&self.family.orthonormal(w).mul_left_const(&jets[w].value.transpose()))
        })
    }

    /// The kernel identity evaluated through recurrence jets instead of
    /// monomial coefficients.
    pub fn kernel_identity_residual_pointwise(&self, x: T, y: T) -> Result<T> {
        Self::check_x(x)?;
        Self::check_x(y)?;
        let (jx, jy) = (self.jets(x), self.jets(y));
        let total = (0..self.blocks()).fold(Mat2::zero(), |acc, w| {
            let a = jy[w].value.transpose() * self.dtilde.apply_jet(&jx[w], x);
            let b = self.dtilde.apply_jet(&jy[w], y).transpose() * jx[w].value;
            acc + a - b
        });
        Ok(total.frobenius())
    }

    /// Diagonalizes B, resolves degenerate clusters with M, and reports
    /// each mode's Rayleigh value under M and its cross residual
    /// ‖Mv − (vᵀMv) v‖.
    pub fn prolate_spectrum(&self) -> Result<SpectrumReport<T>> {
        let m = self.m()?;
        let (b, _) = self.b()?;
        let dim = b.dim();
        let eig = sym_eig(b, lit(crate::linalg::DEFAULT_EIG_TOL))?;
        let bscale = eig.values.iter().fold(T::zero(), |acc, v| acc.max(v.abs())).max(T::min_positive_value());
        let cluster_tol = lit::<T>(CLUSTER_TOL) * bscale;

        let mut clusters: Vec<Vec<usize>> = Vec::new();
        for k in 0..dim {
            match clusters.last_mut() {
                Some(c) if eig.values[k] - eig.values[*c.last().unwrap()] < cluster_tol => c.push(k),
                _ => clusters.push(vec![k]),
            }
        }

        let mut vectors: Vec<Vec<T>> = (0..dim).map(|k| eig.vector(k)).collect();
        let mut cluster_of = vec![0; dim];
        let mut degenerate = Vec::new();
        for (cid, members) in clusters.iter().enumerate() {
            for &k in members {
                cluster_of[k] = cid;
            }
            if members.len() < 2 {
                continue;
            }
            degenerate.push(cid);
            // M restricted to the cluster subspace, then rotate the basis.
            let basis: Vec<Vec<T>> = members.iter().map(|&k| vectors[k].clone()).collect();
            let mv: Vec<Vec<T>> = basis.iter().map(|v| m.mul_vec(v)).collect();
            let small = SquareMat::from_fn(members.len(), |i, j| dot(&basis[i], &mv[j]));
            let local = sym_eig(&small, lit(crate::linalg::DEFAULT_EIG_TOL))?;
            for (slot, &k) in members.iter().enumerate() {
                let coeffs = local.vector(slot);
                vectors[k] = (0..dim)
                    .map(|i| basis.iter().zip(&coeffs).fold(T::zero(), |acc, (v, &c)| acc + c * v[i]))
                    .collect();
            }
        }

        let mut modes: Vec<Mode<T>> = (0..dim)
            .map(|k| {
                let v = &vectors[k];
                let mv = m.mul_vec(v);
                let s = dot(v, &mv) / dot(v, v);
                let cross = mv
                    .iter()
                    .zip(v)
                    .fold(T::zero(), |acc, (a, b)| acc + (*a - s * *b) * (*a - s * *b))
                    .sqrt();
                Mode {
                    index: 0,
                    b_eig: f64_of(eig.values[k]),
                    s_eig: f64_of(s),
                    cross_residual: f64_of(cross),
                    cluster: cluster_of[k],
                    vector: CoeffVec { data: v.clone() },
                }
            })
            .collect();
        modes.sort_by(|a, b| b.s_eig.total_cmp(&a.s_eig));
        for (i, mode) in modes.iter_mut().enumerate() {
            mode.index = i;
        }
        let flagged: Vec<usize> = degenerate
            .iter()
            .copied()
            .filter(|&cid| modes.iter().any(|m| m.cluster == cid && m.cross_residual > 1e-8))
            .collect();

        let min_gap = |vals: &mut Vec<f64>| {
            vals.sort_by(f64::total_cmp);
            let scale = vals.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
            let gap = vals.windows(2).map(|p| p[1] - p[0]).fold(f64::INFINITY, f64::min);
            if scale > 0.0 { gap / scale } else { 0.0 }
        };
        let min_gap_b = min_gap(&mut modes.iter().map(|m| m.b_eig).collect());
        let min_gap_m = min_gap(&mut modes.iter().map(|m| m.s_eig).collect());
        Ok(SpectrumReport {
            commutator_residual: self.commutator_residual()?,
            contrast: min_gap_b / min_gap_m.max(f64::EPSILON),
            min_gap_b,
            min_gap_m,
            degenerate_clusters: degenerate,
            flagged_clusters: flagged,
            modes,
        })
    }

    /// Values of f = Σ C_w Q_w at the Gauss nodes of the cap, with the
    /// matching matrix weights. The rule integrates products of functions in
    /// the span against W exactly whenever the weight exponent is an integer.
    pub fn sample(&self, f: &CoeffVec<T>) -> Result<Samples<T>> {
        let extra = self.config.params.weight_exponent().ceil().to_usize().unwrap_or(0);
        let order = (self.config.big_n + 2 + extra / 2 + 1).max(self.config.quad_order.unwrap_or(1));
        let rule = self.quad.rule(self.domain, order)?;
        Ok(Samples {
            values: rule.nodes.iter().map(|&x| self.eval_coeffs(f, x)).collect(),
            weights: rule
                .nodes
                .iter()
                .zip(&rule.weights)
                .map(|(&x, &omega)| self.quad.effective_weight(self.domain, x).scale(omega))
                .collect(),
            x: rule.nodes.clone(),
        })
    }

    /// Weighted least-squares fit of cap samples in the prolate basis.
    ///
    /// Restricted to the cap the modes are orthogonal with ⟨φ_k, φ_k⟩_α = s_k,
    /// so the normal equations are diagonal: each coefficient is the cap
    /// projection ⟨g, φ_k⟩_α divided by s_k (computed from the same discrete
    /// rule as the projection).
    pub fn reconstruct(
        &self,
        samples: &Samples<T>,
        spectrum: &SpectrumReport<T>,
        selection: ModeSelection,
        noise_level: f64,
        truth: Option<&CoeffVec<T>>,
    ) -> Result<Reconstruction<T>> {
        let total = spectrum.modes.len();
        let kept = match selection {
            ModeSelection::All => total,
            ModeSelection::Count(k) => k,
            ModeSelection::Threshold(s) => spectrum.modes_above(s),
        };
        if kept > total {
            return Err(Error::InvalidParams(format!("{kept} modes requested, {total} available")));
        }
        if samples.x.len() != samples.values.len() || samples.x.len() != samples.weights.len() {
            return Err(Error::Dimension("sample arrays differ in length".into()));
        }
        let upper = self.domain.upper();
        if samples.x.iter().any(|&x| x < -T::one() || x > upper) {
            return Err(Error::Domain(format!("samples must lie in [-1, {upper}]")));
        }
        let mut warnings = Vec::new();
        let floor = noise_level * noise_level;
        let weak = spectrum.modes[..kept].iter().filter(|m| m.s_eig < floor).count();
        if weak > 0 {
            warnings.push(format!(
                "{weak} kept modes have s-eigenvalue below noise^2 = {floor:e}"
            ));
        }
        let phis: Vec<Vec<[T; 2]>> = samples
            .x
            .iter()
            .map(|&x| {
                spectrum.modes[..kept]
                    .iter()
                    .map(|mode| self.eval_coeffs(&mode.vector, x))
                    .collect()
            })
            .collect();
        let mut coeffs = vec![T::zero(); 2 * self.blocks()];
        for k in 0..kept {
            let (mut num, mut den) = (T::zero(), T::zero());
            for i in 0..samples.x.len() {
                let phi = phis[i][k];
                let wphi = [
                    samples.weights[i].get(0, 0) * phi[0] + samples.weights[i].get(0, 1) * phi[1],
                    samples.weights[i].get(1, 0) * phi[0] + samples.weights[i].get(1, 1) * phi[1],
                ];
                num = num + samples.values[i][0] * wphi[0] + samples.values[i][1] * wphi[1];
                den = den + phi[0] * wphi[0] + phi[1] * wphi[1];
            }
            let a = num / den;
            for (c, &v) in coeffs.iter_mut().zip(spectrum.modes[k].vector.as_slice()) {
                *c = *c + a * v;
            }
        }
        let coeffs = CoeffVec::new(coeffs)?;
        let relative_error = truth.map(|t| f64_of(coeffs.sub(t).norm() / t.norm()));
        Ok(Reconstruction {
            smallest_kept_s: spectrum.modes[..kept].last().map_or(f64::NAN, |m| m.s_eig),
            coeffs,
            modes_kept: kept,
            relative_error,
            warnings,
        })
    }

    /// A mode sampled on `points` uniformly spaced points of [−1, α].
    pub fn eigenfunction_grid(&self, mode: &Mode<T>, points: usize) -> Vec<(T, [T; 2])> {
        let upper = self.domain.upper();
        (0..points)
            .map(|i| {
                let x = if points == 1 {
                    -T::one()
                } else {
                    -T::one() + (upper + T::one()) * idx(i) / idx(points - 1)
                };
                (x, self.eval_coeffs(&mode.vector, x))
            })
            .collect()
    }
}

fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (x, y)| acc + *x * *y)
}
