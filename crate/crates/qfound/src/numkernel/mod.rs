//! Dense complex linear algebra shared by every other module.
//!
//! Matrices are small (the largest in the toolkit is a few hundred rows), so
//! everything is a plain row-major `Vec<Complex64>` and all checks use
//! max-entry norms.

mod eigen;
pub mod random;

pub use eigen::{hermitian_eigendecomposition, Eigen};

use num_complex::Complex64;
use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Sub};
use thiserror::Error;

pub type C64 = Complex64;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn r(re: f64) -> C64 {
    C64::new(re, 0.0)
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NumError {
    #[error("operator is not Hermitian (max deviation {max_dev:.3e})")]
    NotHermitian { max_dev: f64 },
    #[error("eigensolver did not converge within {sweeps} sweeps")]
    ConvergenceFailure { sweeps: usize },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invalid state: {0}")]
    InvalidState(String),
    #[error("non-finite entry")]
    NonFinite,
}

/// Tolerances used for equality predicates and rank decisions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TolerancePolicy {
    pub eq_tol: f64,
    /// Relative to the largest singular value.
    pub rank_tol_factor: f64,
}

impl Default for TolerancePolicy {
    fn default() -> Self {
        TolerancePolicy { eq_tol: 1e-9, rank_tol_factor: 1e-12 }
    }
}

impl TolerancePolicy {
    pub fn new(eq_tol: f64, rank_tol_factor: f64) -> Result<Self, NumError> {
        if !(eq_tol > 0.0 && rank_tol_factor > 0.0) {
            return Err(NumError::InvalidState("tolerances must be strictly positive".into()));
        }
        Ok(TolerancePolicy { eq_tol, rank_tol_factor })
    }

    pub fn with_eq_tol(eq_tol: f64) -> Self {
        TolerancePolicy { eq_tol, ..Default::default() }
    }
}

/// Dense square complex matrix.
#[derive(Clone, PartialEq)]
pub struct Operator {
    dim: usize,
    data: Vec<C64>,
}

impl fmt::Debug for Operator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Operator({}x{})", self.dim, self.dim)?;
        for i in 0..self.dim {
            let row: Vec<String> = (0..self.dim)
                .map(|j| {
                    let z = self[(i, j)];
                    format!("{:+.4}{:+.4}i", z.re, z.im)
                })
                .collect();
            writeln!(f, "  [{}]", row.join(", "))?;
        }
        Ok(())
    }
}

impl Index<(usize, usize)> for Operator {
    type Output = C64;
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.data[i * self.dim + j]
    }
}

impl IndexMut<(usize, usize)> for Operator {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.data[i * self.dim + j]
    }
}

impl Operator {
    pub fn zeros(dim: usize) -> Self {
        Operator { dim, data: vec![ZERO; dim * dim] }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m[(i, i)] = ONE;
        }
        m
    }

    pub fn from_rows(rows: Vec<Vec<C64>>) -> Result<Self, NumError> {
        let dim = rows.len();
        let mut data = Vec::with_capacity(dim * dim);
        for row in rows {
            if row.len() != dim {
                return Err(NumError::DimensionMismatch { expected: dim, found: row.len() });
            }
            data.extend(row);
        }
        Self::from_vec(dim, data)
    }

    pub fn from_real_rows(rows: &[Vec<f64>]) -> Result<Self, NumError> {
        Self::from_rows(rows.iter().map(|r| r.iter().map(|&x| C64::new(x, 0.0)).collect()).collect())
    }

    pub fn from_vec(dim: usize, data: Vec<C64>) -> Result<Self, NumError> {
        if data.len() != dim * dim {
            return Err(NumError::DimensionMismatch { expected: dim * dim, found: data.len() });
        }
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(NumError::NonFinite);
        }
        Ok(Operator { dim, data })
    }

    pub fn from_fn(dim: usize, f: impl Fn(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(dim * dim);
        for i in 0..dim {
            for j in 0..dim {
                data.push(f(i, j));
            }
        }
        Operator { dim, data }
    }

    pub fn diag(values: &[f64]) -> Self {
        let mut m = Self::zeros(values.len());
        for (i, &v) in values.iter().enumerate() {
            m[(i, i)] = r(v);
        }
        m
    }

    /// |v⟩⟨w|
    pub fn outer(v: &StateVector, w: &StateVector) -> Self {
        let n = v.dim();
        Operator::from_fn(n, |i, j| v[i] * w[j].conj())
    }

    /// Orthogonal projector onto the span of an orthonormal family.
    pub fn projector_onto(basis: &[StateVector], dim: usize) -> Self {
        let mut p = Operator::zeros(dim);
        for b in basis {
            for i in 0..dim {
                if b[i] == ZERO {
                    continue;
                }
                for j in 0..dim {
                    p.data[i * dim + j] += b[i] * b[j].conj();
                }
            }
        }
        p
    }

    pub fn pauli_x() -> Self {
        Self::from_real_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap()
    }

    pub fn pauli_y() -> Self {
        Self::from_rows(vec![vec![ZERO, -I], vec![I, ZERO]]).unwrap()
    }

    pub fn pauli_z() -> Self {
        Self::diag(&[1.0, -1.0])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[C64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn column(&self, j: usize) -> StateVector {
        StateVector::new((0..self.dim).map(|i| self[(i, j)]).collect())
    }

    pub fn from_columns(cols: &[StateVector]) -> Result<Self, NumError> {
        let n = cols.len();
        let mut m = Operator::zeros(n);
        for (j, col) in cols.iter().enumerate() {
            if col.dim() != n {
                return Err(NumError::DimensionMismatch { expected: n, found: col.dim() });
            }
            for i in 0..n {
                m[(i, j)] = col[i];
            }
        }
        Ok(m)
    }

    fn check_same(&self, other: &Operator) -> Result<(), NumError> {
        if self.dim != other.dim {
            return Err(NumError::DimensionMismatch { expected: self.dim, found: other.dim });
        }
        Ok(())
    }

    pub fn adjoint(&self) -> Self {
        Operator::from_fn(self.dim, |i, j| self[(j, i)].conj())
    }

    pub fn scale(&self, s: C64) -> Self {
        Operator { dim: self.dim, data: self.data.iter().map(|z| z * s).collect() }
    }

    pub fn scale_re(&self, s: f64) -> Self {
        self.scale(r(s))
    }

    pub fn try_add(&self, other: &Operator) -> Result<Self, NumError> {
        self.check_same(other)?;
        Ok(Operator { dim: self.dim, data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect() })
    }

    pub fn try_sub(&self, other: &Operator) -> Result<Self, NumError> {
        self.check_same(other)?;
        Ok(Operator { dim: self.dim, data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect() })
    }

    pub fn try_mul(&self, other: &Operator) -> Result<Self, NumError> {
        self.check_same(other)?;
        let n = self.dim;
        let mut out = vec![ZERO; n * n];
        for i in 0..n {
            let orow = &mut out[i * n..(i + 1) * n];
            for k in 0..n {
                let a = self.data[i * n + k];
                if a == ZERO {
                    continue;
                }
                let brow = &other.data[k * n..(k + 1) * n];
                for (o, b) in orow.iter_mut().zip(brow) {
                    *o += a * b;
                }
            }
        }
        Ok(Operator { dim: n, data: out })
    }

    /// A·B − B·A
    pub fn commutator(&self, other: &Operator) -> Result<Self, NumError> {
        self.try_mul(other)?.try_sub(&other.try_mul(self)?)
    }

    pub fn apply(&self, v: &StateVector) -> Result<StateVector, NumError> {
        if v.dim() != self.dim {
            return Err(NumError::DimensionMismatch { expected: self.dim, found: v.dim() });
        }
        let n = self.dim;
        let mut out = vec![ZERO; n];
        for (i, o) in out.iter_mut().enumerate() {
            let row = &self.data[i * n..(i + 1) * n];
            *o = row.iter().zip(v.amplitudes()).map(|(a, b)| a * b).sum();
        }
        Ok(StateVector::new(out))
    }

    /// ⟨v, A w⟩
    pub fn sandwich(&self, v: &StateVector, w: &StateVector) -> Result<C64, NumError> {
        Ok(v.inner(&self.apply(w)?))
    }

    pub fn expectation(&self, v: &StateVector) -> Result<f64, NumError> {
        Ok(self.sandwich(v, v)?.re)
    }

    pub fn trace(&self) -> C64 {
        (0..self.dim).map(|i| self[(i, i)]).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Max-entry distance to another operator (infinite on dimension mismatch).
    pub fn max_diff(&self, other: &Operator) -> f64 {
        if self.dim != other.dim {
            return f64::INFINITY;
        }
        self.data.iter().zip(&other.data).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }

    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn hermitian_deviation(&self) -> f64 {
        let n = self.dim;
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in i..n {
                worst = worst.max((self[(i, j)] - self[(j, i)].conj()).norm());
            }
        }
        worst
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermitian_deviation() <= tol
    }

    pub fn is_projector(&self, tol: f64) -> bool {
        self.is_hermitian(tol) && self.try_mul(self).map(|sq| sq.max_diff(self) <= tol).unwrap_or(false)
    }

    pub fn is_unitary(&self, tol: f64) -> bool {
        self.adjoint()
            .try_mul(self)
            .map(|p| p.max_diff(&Operator::identity(self.dim)) <= tol)
            .unwrap_or(false)
    }

    pub fn is_diagonal(&self, tol: f64) -> bool {
        let n = self.dim;
        (0..n).all(|i| (0..n).all(|j| i == j || self[(i, j)].norm() <= tol))
    }

    /// (A + A*)/2
    pub fn hermitian_part(&self) -> Self {
        Operator::from_fn(self.dim, |i, j| (self[(i, j)] + self[(j, i)].conj()) * 0.5)
    }

    /// The block `rows × cols` restricted to an index subset, as a smaller operator.
    pub fn submatrix(&self, idx: &[usize]) -> Self {
        Operator::from_fn(idx.len(), |a, b| self[(idx[a], idx[b])])
    }

    /// Smallest eigenvalue of the Hermitian part.
    pub fn min_eigenvalue(&self, pol: &TolerancePolicy) -> Result<f64, NumError> {
        let h = self.hermitian_part();
        let e = hermitian_eigendecomposition(&h, pol)?;
        Ok(e.values.first().copied().unwrap_or(0.0))
    }
}

impl Add for &Operator {
    type Output = Operator;
    fn add(self, rhs: &Operator) -> Operator {
        self.try_add(rhs).expect("operator dimensions differ")
    }
}

impl Sub for &Operator {
    type Output = Operator;
    fn sub(self, rhs: &Operator) -> Operator {
        self.try_sub(rhs).expect("operator dimensions differ")
    }
}

impl Mul for &Operator {
    type Output = Operator;
    fn mul(self, rhs: &Operator) -> Operator {
        self.try_mul(rhs).expect("operator dimensions differ")
    }
}

/// A vector of complex amplitudes with an optional label.
#[derive(Clone, PartialEq, Debug)]
pub struct StateVector {
    amps: Vec<C64>,
    pub label: Option<String>,
}

impl Index<usize> for StateVector {
    type Output = C64;
    fn index(&self, i: usize) -> &C64 {
        &self.amps[i]
    }
}

impl IndexMut<usize> for StateVector {
    fn index_mut(&mut self, i: usize) -> &mut C64 {
        &mut self.amps[i]
    }
}

impl StateVector {
    pub fn new(amps: Vec<C64>) -> Self {
        StateVector { amps, label: None }
    }

    pub fn from_real(v: &[f64]) -> Self {
        Self::new(v.iter().map(|&x| r(x)).collect())
    }

    pub fn zeros(dim: usize) -> Self {
        Self::new(vec![ZERO; dim])
    }

    pub fn basis(dim: usize, k: usize) -> Self {
        let mut v = Self::zeros(dim);
        v.amps[k] = ONE;
        v
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = Some(label.into());
        self
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub fn into_amplitudes(self) -> Vec<C64> {
        self.amps
    }

    /// ⟨self, other⟩, antilinear in the first slot.
    pub fn inner(&self, other: &StateVector) -> C64 {
        self.amps.iter().zip(&other.amps).map(|(a, b)| a.conj() * b).sum()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn is_normalized(&self, tol: f64) -> bool {
        (self.norm() - 1.0).abs() <= tol
    }

    pub fn normalized(&self) -> Self {
        let n = self.norm();
        if n == 0.0 {
            return self.clone();
        }
        self.scale(r(1.0 / n))
    }

    pub fn scale(&self, s: C64) -> Self {
        StateVector { amps: self.amps.iter().map(|z| z * s).collect(), label: self.label.clone() }
    }

    pub fn add(&self, other: &StateVector) -> Self {
        StateVector::new(self.amps.iter().zip(&other.amps).map(|(a, b)| a + b).collect())
    }

    pub fn sub(&self, other: &StateVector) -> Self {
        StateVector::new(self.amps.iter().zip(&other.amps).map(|(a, b)| a - b).collect())
    }

    /// self += s·other
    pub fn axpy(&mut self, s: C64, other: &StateVector) {
        for (a, b) in self.amps.iter_mut().zip(&other.amps) {
            *a += s * b;
        }
    }

    pub fn kron(&self, other: &StateVector) -> Self {
        let mut out = Vec::with_capacity(self.dim() * other.dim());
        for a in &self.amps {
            for b in &other.amps {
                out.push(a * b);
            }
        }
        StateVector::new(out)
    }

    pub fn max_diff(&self, other: &StateVector) -> f64 {
        if self.dim() != other.dim() {
            return f64::INFINITY;
        }
        self.amps.iter().zip(&other.amps).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }

    pub fn distance(&self, other: &StateVector) -> f64 {
        self.sub(other).norm()
    }
}

/// A density matrix: Hermitian, positive, trace one.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityState {
    matrix: Operator,
}

impl DensityState {
    pub fn new(matrix: Operator, pol: &TolerancePolicy) -> Result<Self, NumError> {
        let dev = matrix.hermitian_deviation();
        if dev > pol.eq_tol {
            return Err(NumError::NotHermitian { max_dev: dev });
        }
        let tr = matrix.trace();
        if (tr - ONE).norm() > pol.eq_tol {
            return Err(NumError::InvalidState(format!("trace {tr} differs from 1")));
        }
        let min = matrix.min_eigenvalue(pol)?;
        if min < -pol.eq_tol {
            return Err(NumError::InvalidState(format!("negative eigenvalue {min:.3e}")));
        }
        Ok(DensityState { matrix })
    }

    pub fn pure(v: &StateVector) -> Self {
        let v = v.normalized();
        DensityState { matrix: Operator::outer(&v, &v) }
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        DensityState { matrix: Operator::identity(dim).scale_re(1.0 / dim as f64) }
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    pub fn matrix(&self) -> &Operator {
        &self.matrix
    }

    /// tr(ρA)
    pub fn expect(&self, a: &Operator) -> Result<C64, NumError> {
        if a.dim() != self.dim() {
            return Err(NumError::DimensionMismatch { expected: self.dim(), found: a.dim() });
        }
        let n = self.dim();
        let mut s = ZERO;
        for i in 0..n {
            for k in 0..n {
                s += self.matrix[(i, k)] * a[(k, i)];
            }
        }
        Ok(s)
    }

    pub fn tensor(&self, other: &DensityState) -> DensityState {
        DensityState { matrix: tensor_product(&self.matrix, &other.matrix) }
    }
}

/// Kronecker product with index (i,k) ↦ i·dimB + k.
pub fn tensor_product(a: &Operator, b: &Operator) -> Operator {
    let (na, nb) = (a.dim(), b.dim());
    let n = na * nb;
    let mut m = Operator::zeros(n);
    for i in 0..na {
        for j in 0..na {
            let aij = a[(i, j)];
            if aij == ZERO {
                continue;
            }
            for k in 0..nb {
                for l in 0..nb {
                    m[(i * nb + k, j * nb + l)] = aij * b[(k, l)];
                }
            }
        }
    }
    m
}

/// Tensor product of a list of operators, left to right.
pub fn tensor_all(ops: &[&Operator]) -> Operator {
    let mut acc = Operator::identity(1);
    for op in ops {
        acc = tensor_product(&acc, op);
    }
    acc
}

/// Trace out the listed factors of a multipartite operator.
pub fn partial_trace(a: &Operator, dims: &[usize], traced: &[usize]) -> Result<Operator, NumError> {
    let total: usize = dims.iter().product();
    if total != a.dim() {
        return Err(NumError::DimensionMismatch { expected: total, found: a.dim() });
    }
    if let Some(&bad) = traced.iter().find(|&&t| t >= dims.len()) {
        return Err(NumError::DimensionMismatch { expected: dims.len(), found: bad + 1 });
    }
    let nf = dims.len();
    let mut strides = vec![1usize; nf];
    for f in (0..nf.saturating_sub(1)).rev() {
        strides[f] = strides[f + 1] * dims[f + 1];
    }
    let kept: Vec<usize> = (0..nf).filter(|f| !traced.contains(f)).collect();
    let gone: Vec<usize> = (0..nf).filter(|f| traced.contains(f)).collect();
    let kept_dims: Vec<usize> = kept.iter().map(|&f| dims[f]).collect();
    let gone_dims: Vec<usize> = gone.iter().map(|&f| dims[f]).collect();
    let out_dim: usize = kept_dims.iter().product();
    let sum_dim: usize = gone_dims.iter().product();

    // full-space offset contributed by each kept / traced multi-index
    let offsets = |factors: &[usize], fdims: &[usize], count: usize| -> Vec<usize> {
        (0..count)
            .map(|mut idx| {
                let mut off = 0;
                for p in (0..factors.len()).rev() {
                    off += (idx % fdims[p]) * strides[factors[p]];
                    idx /= fdims[p];
                }
                off
            })
            .collect()
    };
    let kept_off = offsets(&kept, &kept_dims, out_dim);
    let gone_off = offsets(&gone, &gone_dims, sum_dim);

    let mut out = Operator::zeros(out_dim);
    for (r_out, &ro) in kept_off.iter().enumerate() {
        for (c_out, &co) in kept_off.iter().enumerate() {
            let mut s = ZERO;
            for &g in &gone_off {
                s += a[(ro + g, co + g)];
            }
            out[(r_out, c_out)] = s;
        }
    }
    Ok(out)
}

/// Orthonormal basis of the span of `vectors`.
///
/// One-sided Jacobi orthogonalization of the column set gives singular values
/// at full relative accuracy; columns whose singular value exceeds
/// `rank_tol_factor × σ_max` are kept, ordered by decreasing singular value.
pub fn orthonormal_range_basis(vectors: &[StateVector], pol: &TolerancePolicy) -> Vec<StateVector> {
    if vectors.is_empty() {
        return Vec::new();
    }
    let n = vectors[0].dim();
    let mut cols: Vec<Vec<C64>> = vectors.iter().map(|v| v.amplitudes().to_vec()).collect();
    let k = cols.len();
    let eps = f64::EPSILON;
    for _sweep in 0..60 {
        let mut rotated = false;
        for p in 0..k {
            for q in (p + 1)..k {
                let alpha: f64 = cols[p].iter().map(|z| z.norm_sqr()).sum();
                let beta: f64 = cols[q].iter().map(|z| z.norm_sqr()).sum();
                let gamma: C64 = cols[p].iter().zip(&cols[q]).map(|(a, b)| a.conj() * b).sum();
                let g = gamma.norm();
                if g == 0.0 || g <= eps * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let (gpp, gpq, gqp, gqq) = eigen::jacobi_rotation(alpha, beta, gamma);
                #[allow(clippy::needless_range_loop)]
                for i in 0..n {
                    let (a, b) = (cols[p][i], cols[q][i]);
                    cols[p][i] = a * gpp + b * gqp;
                    cols[q][i] = a * gpq + b * gqq;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut normed: Vec<(f64, usize)> =
        cols.iter().enumerate().map(|(i, c)| (c.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt(), i)).collect();
    normed.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
    let smax = normed[0].0;
    if smax == 0.0 {
        return Vec::new();
    }
    let thresh = pol.rank_tol_factor * smax;
    normed
        .into_iter()
        .filter(|(s, _)| *s > thresh)
        .map(|(s, i)| {
            let v = StateVector::new(cols[i].iter().map(|z| z / s).collect());
            canonical_phase(v, pol.rank_tol_factor)
        })
        .collect()
}

/// Rotate the global phase so the first component above `thresh` is real and nonnegative.
pub fn canonical_phase(v: StateVector, thresh: f64) -> StateVector {
    if let Some(z) = v.amplitudes().iter().find(|z| z.norm() > thresh) {
        let ph = z.conj() / z.norm();
        let label = v.label.clone();
        let mut out = v.scale(ph);
        out.label = label;
        return out;
    }
    v
}

/// Complete an orthonormal family to a full basis with standard vectors in index order.
pub fn complete_basis(family: &[StateVector], dim: usize, tol: f64) -> Vec<StateVector> {
    let mut out: Vec<StateVector> = family.to_vec();
    for k in 0..dim {
        if out.len() == dim {
            break;
        }
        let mut v = StateVector::basis(dim, k);
        for _ in 0..2 {
            for b in &out {
                let ov = b.inner(&v);
                v.axpy(-ov, b);
            }
        }
        let nv = v.norm();
        if nv > tol {
            out.push(v.scale(r(1.0 / nv)));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::random::*;
    use super::*;

    #[test]
    fn identity_tensor_identity() {
        let i2 = Operator::identity(2);
        let i3 = Operator::identity(3);
        assert_eq!(tensor_product(&i2, &i3), Operator::identity(6));
    }

    #[test]
    fn sigma_z_on_product_basis() {
        let zi = tensor_product(&Operator::pauli_z(), &Operator::identity(2));
        let v = StateVector::basis(2, 0).kron(&StateVector::basis(2, 1));
        assert!(zi.apply(&v).unwrap().max_diff(&v) < 1e-15);
    }

    #[test]
    fn tensor_bilinearity_oracle() {
        let mut rng = seeded(11);
        let a = random_operator(&mut rng, 3);
        let b = random_operator(&mut rng, 2);
        let x = random_state(&mut rng, 3);
        let y = random_state(&mut rng, 2);
        let lhs = tensor_product(&a, &b).apply(&x.kron(&y)).unwrap();
        let rhs = a.apply(&x).unwrap().kron(&b.apply(&y).unwrap());
        assert!(lhs.max_diff(&rhs) < 1e-12);
    }

    #[test]
    fn partial_trace_product() {
        let mut rng = seeded(5);
        let r1 = random_density(&mut rng, 3);
        let r2 = random_density(&mut rng, 2);
        let joint = r1.tensor(&r2);
        let red = partial_trace(joint.matrix(), &[3, 2], &[1]).unwrap();
        assert!(red.max_diff(r1.matrix()) < 1e-12);
        let all = partial_trace(joint.matrix(), &[3, 2], &[0, 1]).unwrap();
        assert_eq!(all.dim(), 1);
        assert!((all[(0, 0)] - ONE).norm() < 1e-12);
    }

    #[test]
    fn partial_trace_index_sum_oracle() {
        let mut rng = seeded(9);
        let a = random_operator(&mut rng, 8);
        // trace out the middle qubit by explicit index arithmetic
        let mut want = Operator::zeros(4);
        for i in 0..2 {
            for k in 0..2 {
                for j in 0..2 {
                    for l in 0..2 {
                        let mut s = ZERO;
                        for m in 0..2 {
                            s += a[(i * 4 + m * 2 + k, j * 4 + m * 2 + l)];
                        }
                        want[(i * 2 + k, j * 2 + l)] = s;
                    }
                }
            }
        }
        let got = partial_trace(&a, &[2, 2, 2], &[1]).unwrap();
        assert!(got.max_diff(&want) < 1e-12);
    }

    #[test]
    fn partial_trace_dimension_mismatch() {
        let a = Operator::identity(6);
        assert!(matches!(partial_trace(&a, &[2, 2], &[0]), Err(NumError::DimensionMismatch { .. })));
    }

    #[test]
    fn range_basis_collinear() {
        let pol = TolerancePolicy::default();
        let b = orthonormal_range_basis(&[StateVector::from_real(&[1.0, 0.0, 0.0]), StateVector::from_real(&[2.0, 0.0, 0.0])], &pol);
        assert_eq!(b.len(), 1);
        assert!(b[0].max_diff(&StateVector::from_real(&[1.0, 0.0, 0.0])) < 1e-12);
    }

    #[test]
    fn range_basis_plane() {
        let pol = TolerancePolicy::default();
        let b = orthonormal_range_basis(&[StateVector::from_real(&[1.0, 0.0, 0.0]), StateVector::from_real(&[0.0, 1.0, 0.0])], &pol);
        assert_eq!(b.len(), 2);
        let p = Operator::projector_onto(&b, 3);
        assert!(p.max_diff(&Operator::diag(&[1.0, 1.0, 0.0])) < 1e-12);
    }

    #[test]
    fn range_basis_projection_residual() {
        let pol = TolerancePolicy::default();
        let mut rng = seeded(21);
        let vs: Vec<StateVector> = (0..5).map(|_| random_vector(&mut rng, 3)).collect();
        let b = orthonormal_range_basis(&vs, &pol);
        assert_eq!(b.len(), 3);
        let p = Operator::projector_onto(&b, 3);
        for v in &vs {
            assert!(p.apply(v).unwrap().max_diff(v) < 1e-10);
        }
    }

    #[test]
    fn range_basis_empty() {
        assert!(orthonormal_range_basis(&[], &TolerancePolicy::default()).is_empty());
    }

    #[test]
    fn density_validation() {
        let pol = TolerancePolicy::default();
        assert!(DensityState::new(Operator::diag(&[0.5, 0.5]), &pol).is_ok());
        assert!(DensityState::new(Operator::diag(&[1.5, -0.5]), &pol).is_err());
        assert!(DensityState::new(Operator::diag(&[0.5, 0.6]), &pol).is_err());
    }

    #[test]
    fn tolerance_policy_positive() {
        assert!(TolerancePolicy::new(0.0, 1e-12).is_err());
        assert!(TolerancePolicy::new(1e-9, 1e-12).is_ok());
    }
}
