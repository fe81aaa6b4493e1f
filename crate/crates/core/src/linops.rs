//! Tolerance-aware dense linear algebra over complex matrices.
//!
//! Everything downstream turns an exact operator identity into a numerical
//! predicate through the [`Tolerance`] defined here: ranks and kernels use a
//! singular-value cutoff `max(rel_eps * sigma_max, abs_floor)`.
//!
//! Operator spaces (spans of equally shaped matrices) are handled through
//! [`OpSpace`], which stores an orthonormal basis of column-major
//! vectorizations. Under that identification the Hilbert-Schmidt inner
//! product becomes the Euclidean one and `vec(A X B) = (B^T kron A) vec(X)`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tolerance {
    pub rel_eps: f64,
    pub abs_floor: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance {
            rel_eps: 1e-9,
            abs_floor: 1e-12,
        }
    }
}

impl Tolerance {
    pub fn new(rel_eps: f64, abs_floor: f64) -> Result<Self> {
        if !(rel_eps.is_finite() && rel_eps > 0.0) {
            return Err(Error::invalid(format!("rel_eps must be positive, got {rel_eps}")));
        }
        if !(abs_floor.is_finite() && abs_floor >= 0.0) {
            return Err(Error::invalid(format!(
                "abs_floor must be nonnegative, got {abs_floor}"
            )));
        }
        Ok(Tolerance { rel_eps, abs_floor })
    }

    /// Same absolute floor, different relative epsilon.
    pub fn with_rel_eps(rel_eps: f64) -> Result<Self> {
        Tolerance::new(rel_eps, Tolerance::default().abs_floor)
    }

    pub fn cutoff(&self, scale: f64) -> f64 {
        (self.rel_eps * scale).max(self.abs_floor)
    }

    pub fn accepts(&self, residual: f64, scale: f64) -> bool {
        residual <= self.cutoff(scale)
    }
}

pub fn check_finite(a: &CMat, what: &str) -> Result<()> {
    if a.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        Ok(())
    } else {
        Err(Error::invalid(format!("{what} has non-finite entries")))
    }
}

pub fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}

/// Matrix unit `e_ij` of shape `rows x cols`.
pub fn matrix_unit(rows: usize, cols: usize, i: usize, j: usize) -> CMat {
    let mut m = CMat::zeros(rows, cols);
    m[(i, j)] = ONE;
    m
}

pub fn from_real(rows: usize, cols: usize, entries: &[f64]) -> CMat {
    assert_eq!(entries.len(), rows * cols);
    CMat::from_row_iterator(rows, cols, entries.iter().map(|&x| C64::new(x, 0.0)))
}

pub fn frobenius(a: &CMat) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Column-major vectorization.
pub fn vectorize(a: &CMat) -> DVector<C64> {
    DVector::from_column_slice(a.as_slice())
}

pub fn unvectorize(v: &[C64], rows: usize, cols: usize) -> CMat {
    CMat::from_column_slice(rows, cols, v)
}

pub fn kron(a: &CMat, b: &CMat) -> CMat {
    a.kronecker(b)
}

/// Makes the first clearly nonzero entry of each column real positive.
pub(crate) fn fix_column_phases(m: &mut CMat) {
    for mut col in m.column_iter_mut() {
        let norm = col.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue;
        }
        if let Some(lead) = col.iter().copied().find(|z| z.norm() > 1e-8 * norm) {
            let phase = lead.conj() / lead.norm();
            col.iter_mut().for_each(|z| *z *= phase);
        }
    }
}

pub(crate) struct Svd {
    pub u: Option<CMat>,
    pub v_t: Option<CMat>,
    pub singular_values: Vec<f64>,
}

fn to_faer(a: &CMat) -> faer::Mat<C64> {
    faer::Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)])
}

fn from_faer(a: faer::MatRef<'_, C64>) -> CMat {
    CMat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)])
}

/// Thin SVD with singular values sorted in descending order.
pub(crate) fn svd(a: &CMat, want_u: bool, want_v: bool) -> Svd {
    let (m, n) = a.shape();
    let k = m.min(n);
    if k == 0 {
        return Svd {
            u: want_u.then(|| CMat::zeros(m, 0)),
            v_t: want_v.then(|| CMat::zeros(0, n)),
            singular_values: Vec::new(),
        };
    }
    let raw = to_faer(a)
        .thin_svd()
        .expect("SVD of a finite matrix converges");
    let singular_values = raw.S().column_vector().iter().map(|s| s.re).collect();
    Svd {
        u: want_u.then(|| from_faer(raw.U())),
        v_t: want_v.then(|| from_faer(raw.V()).adjoint()),
        singular_values,
    }
}

pub fn singular_values(a: &CMat) -> Vec<f64> {
    if a.is_empty() {
        return Vec::new();
    }
    svd(a, false, false).singular_values
}

pub fn operator_norm(a: &CMat) -> f64 {
    singular_values(a).first().copied().unwrap_or(0.0)
}

pub fn numerical_rank(a: &CMat, tol: Tolerance) -> usize {
    let sv = singular_values(a);
    let Some(&smax) = sv.first() else { return 0 };
    let cutoff = tol.cutoff(smax);
    sv.iter().filter(|&&s| s > cutoff).count()
}

/// Orthonormal basis (as columns) of the numerical kernel of `a`.
pub fn nullspace(a: &CMat, tol: Tolerance) -> Result<CMat> {
    if a.ncols() == 0 {
        return Err(Error::invalid("nullspace of a matrix with no columns"));
    }
    check_finite(a, "nullspace input")?;
    let n = a.ncols();
    if a.nrows() == 0 {
        return Ok(identity(n));
    }
    // The thin SVD only yields min(rows, cols) right singular vectors, so
    // wide systems are padded with zero rows.
    let padded;
    let square_or_tall = if a.nrows() < n {
        padded = a.clone().resize_vertically(n, ZERO);
        &padded
    } else {
        a
    };
    let Svd {
        v_t,
        singular_values,
        ..
    } = svd(square_or_tall, false, true);
    let v_t = v_t.expect("right singular vectors requested");
    let cutoff = tol.cutoff(singular_values[0]);
    let kernel: Vec<usize> = (0..n).filter(|&i| singular_values[i] <= cutoff).collect();
    let mut basis = CMat::from_fn(n, kernel.len(), |r, c| v_t[(kernel[c], r)].conj());
    fix_column_phases(&mut basis);
    Ok(basis)
}

/// Orthonormal basis (as columns) of the numerical range of `a`.
pub fn range_basis(a: &CMat, tol: Tolerance) -> CMat {
    range_basis_with_cutoff(a, |smax| tol.cutoff(smax))
}

fn range_basis_with_cutoff(a: &CMat, cutoff: impl Fn(f64) -> f64) -> CMat {
    if a.ncols() == 0 || a.nrows() == 0 {
        return CMat::zeros(a.nrows(), 0);
    }
    let Svd {
        u,
        singular_values,
        ..
    } = svd(a, true, false);
    let u = u.expect("left singular vectors requested");
    let cut = cutoff(singular_values[0]);
    let keep = singular_values.iter().filter(|&&s| s > cut).count();
    let mut basis = u.columns(0, keep).into_owned();
    fix_column_phases(&mut basis);
    basis
}

/// Hermitian eigendecomposition with eigenvalues in descending order and the
/// phase convention applied to eigenvectors.
pub fn hermitian_eigen(a: &CMat) -> (Vec<f64>, CMat) {
    let n = a.nrows();
    if n == 0 {
        return (Vec::new(), CMat::zeros(0, 0));
    }
    let h = (a + a.adjoint()) * C64::new(0.5, 0.0);
    let eig = to_faer(&h)
        .self_adjoint_eigen(faer::Side::Lower)
        .expect("eigendecomposition of a finite matrix converges");
    let raw: Vec<f64> = eig.S().column_vector().iter().map(|l| l.re).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| raw[j].total_cmp(&raw[i]));
    let values = order.iter().map(|&i| raw[i]).collect();
    let u = eig.U();
    let mut vectors = CMat::from_fn(n, n, |r, c| u[(r, order[c])]);
    fix_column_phases(&mut vectors);
    (values, vectors)
}

fn check_hermitian(a: &CMat, tol: Tolerance, what: &str) -> Result<()> {
    if !a.is_square() {
        return Err(Error::invalid(format!(
            "{what} must be square, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    check_finite(a, what)?;
    let skew = frobenius(&(a - a.adjoint()));
    if !tol.accepts(skew, frobenius(a)) {
        return Err(Error::invalid(format!(
            "{what} is not hermitian (skew part {skew:e})"
        )));
    }
    Ok(())
}

/// Eigenvalues and eigenvectors of a PSD matrix, with the negativity check.
/// Returns `(eigenvalues, eigenvectors, cutoff)`.
fn psd_eigen(a: &CMat, tol: Tolerance) -> Result<(Vec<f64>, CMat, f64)> {
    check_hermitian(a, tol, "PSD input")?;
    let (values, vectors) = hermitian_eigen(a);
    let scale = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let cutoff = tol.cutoff(scale);
    if let Some(&min) = values.last() {
        if min < -cutoff {
            return Err(Error::NotPsd {
                min_eigenvalue: min,
                threshold: cutoff,
            });
        }
    }
    Ok((values, vectors, cutoff))
}

#[derive(Clone, Debug)]
pub struct PsdFactor {
    /// `rank x m` with `factor^* factor = K`; rows are mutually orthogonal.
    pub factor: CMat,
    pub rank: usize,
    pub eigenvalues: Vec<f64>,
}

/// Rank factorization `K = F^* F` of a hermitian PSD matrix.
pub fn psd_factor(k: &CMat, tol: Tolerance) -> Result<PsdFactor> {
    let m = k.nrows();
    let (values, vectors, cutoff) = psd_eigen(k, tol)?;
    let rank = values.iter().filter(|&&v| v > cutoff).count();
    let mut factor = CMat::zeros(rank, m);
    for r in 0..rank {
        let s = values[r].sqrt();
        for c in 0..m {
            factor[(r, c)] = vectors[(c, r)].conj() * s;
        }
    }
    Ok(PsdFactor {
        factor,
        rank,
        eigenvalues: values,
    })
}

/// Positive square root of a hermitian PSD matrix.
pub fn sqrt_psd(a: &CMat, tol: Tolerance) -> Result<CMat> {
    let (values, vectors, _) = psd_eigen(a, tol)?;
    let roots = DVector::from_iterator(
        values.len(),
        values.iter().map(|&v| C64::new(v.max(0.0).sqrt(), 0.0)),
    );
    let scaled = CMat::from_fn(vectors.nrows(), vectors.ncols(), |r, c| {
        vectors[(r, c)] * roots[c]
    });
    Ok(&scaled * vectors.adjoint())
}

/// Moore-Penrose pseudoinverse on the numerical range.
pub fn pseudo_inverse(a: &CMat, tol: Tolerance) -> CMat {
    if a.is_empty() {
        return CMat::zeros(a.ncols(), a.nrows());
    }
    let Svd {
        u,
        v_t,
        singular_values,
    } = svd(a, true, true);
    let (u, v_t) = (u.unwrap(), v_t.unwrap());
    let cutoff = tol.cutoff(singular_values[0]);
    let mut out = CMat::zeros(a.ncols(), a.nrows());
    for (i, &s) in singular_values.iter().enumerate() {
        if s > cutoff {
            out += v_t.row(i).adjoint() * u.column(i).adjoint() * C64::new(1.0 / s, 0.0);
        }
    }
    out
}

/// Least-squares solution of `X * lhs = rhs`, together with the Frobenius
/// residual `|X lhs - rhs|`.
pub fn solve_right(lhs: &CMat, rhs: &CMat, tol: Tolerance) -> (CMat, f64) {
    assert_eq!(lhs.ncols(), rhs.ncols(), "solve_right: column mismatch");
    let x = rhs * pseudo_inverse(lhs, tol);
    let residual = frobenius(&(&x * lhs - rhs));
    (x, residual)
}

/// A linear span of `rows x cols` matrices, stored as an orthonormal basis of
/// vectorizations (one basis element per column of `q`).
#[derive(Clone, Debug)]
pub struct OpSpace {
    rows: usize,
    cols: usize,
    q: CMat,
}

impl OpSpace {
    pub fn zero(rows: usize, cols: usize) -> Self {
        OpSpace {
            rows,
            cols,
            q: CMat::zeros(rows * cols, 0),
        }
    }

    /// Wraps columns that are already orthonormal.
    pub fn from_orthonormal_columns(rows: usize, cols: usize, q: CMat) -> Self {
        assert_eq!(q.nrows(), rows * cols);
        OpSpace { rows, cols, q }
    }

    pub fn from_spanning(rows: usize, cols: usize, mats: &[CMat], tol: Tolerance) -> Result<Self> {
        let stacked = stack_vectorized(rows, cols, mats)?;
        Ok(OpSpace {
            rows,
            cols,
            q: range_basis(&stacked, tol),
        })
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn dim(&self) -> usize {
        self.q.ncols()
    }

    pub fn columns(&self) -> &CMat {
        &self.q
    }

    pub fn element(&self, i: usize) -> CMat {
        unvectorize(self.q.column(i).as_slice(), self.rows, self.cols)
    }

    pub fn elements(&self) -> Vec<CMat> {
        (0..self.dim()).map(|i| self.element(i)).collect()
    }

    fn check_shape(&self, m: &CMat) -> Result<()> {
        if m.shape() != (self.rows, self.cols) {
            return Err(Error::invalid(format!(
                "expected a {}x{} matrix, got {}x{}",
                self.rows,
                self.cols,
                m.nrows(),
                m.ncols()
            )));
        }
        Ok(())
    }

    /// Coordinates of the orthogonal projection of `m` onto the span.
    pub fn coefficients(&self, m: &CMat) -> Result<DVector<C64>> {
        self.check_shape(m)?;
        Ok(self.q.adjoint() * vectorize(m))
    }

    pub fn combine(&self, coefficients: &[C64]) -> CMat {
        assert_eq!(coefficients.len(), self.dim());
        let v = &self.q * DVector::from_column_slice(coefficients);
        unvectorize(v.as_slice(), self.rows, self.cols)
    }

    pub fn project(&self, m: &CMat) -> Result<CMat> {
        let c = self.coefficients(m)?;
        let v = &self.q * c;
        Ok(unvectorize(v.as_slice(), self.rows, self.cols))
    }

    /// Frobenius distance from `m` to the span.
    pub fn residual(&self, m: &CMat) -> Result<f64> {
        Ok(frobenius(&(m - self.project(m)?)))
    }

    /// Whether `m` lies in the span, relative to its own size.
    pub fn contains(&self, m: &CMat, tol: Tolerance) -> Result<bool> {
        Ok(tol.accepts(self.residual(m)?, frobenius(m)))
    }

    /// Largest residual of `mats` against the span, each relative to
    /// `max(1, |m|_F)`.
    pub fn worst_relative_residual(&self, mats: &[CMat]) -> Result<f64> {
        let mut worst = 0.0f64;
        for m in mats {
            worst = worst.max(self.residual(m)? / frobenius(m).max(1.0));
        }
        Ok(worst)
    }

    /// Adds `mats` to the span. Returns the enlarged space and whether any
    /// new direction appeared.
    pub fn extend(&self, mats: &[CMat], tol: Tolerance) -> Result<(OpSpace, bool)> {
        if mats.is_empty() {
            return Ok((self.clone(), false));
        }
        let w = stack_vectorized(self.rows, self.cols, mats)?;
        let scale = w
            .column_iter()
            .map(|c| c.norm())
            .fold(0.0f64, f64::max);
        let cutoff = tol.cutoff(scale);
        let r = &w - &self.q * (self.q.adjoint() * &w);
        if r.column_iter().all(|c| c.norm() <= cutoff) {
            return Ok((self.clone(), false));
        }
        let fresh = range_basis_with_cutoff(&r, |_| cutoff);
        // One more orthogonalization pass against the existing basis.
        let fresh = &fresh - &self.q * (self.q.adjoint() * &fresh);
        let fresh = range_basis_with_cutoff(&fresh, |_| 0.5);
        if fresh.ncols() == 0 {
            return Ok((self.clone(), false));
        }
        let mut q = CMat::zeros(self.q.nrows(), self.dim() + fresh.ncols());
        q.columns_mut(0, self.dim()).copy_from(&self.q);
        q.columns_mut(self.dim(), fresh.ncols()).copy_from(&fresh);
        Ok((
            OpSpace {
                rows: self.rows,
                cols: self.cols,
                q,
            },
            true,
        ))
    }

    /// Frobenius norm of the difference of the orthogonal projectors onto the
    /// two spans.
    pub fn projector_distance(&self, other: &OpSpace) -> Result<f64> {
        if self.shape() != other.shape() {
            return Err(Error::invalid(format!(
                "comparing spans of {}x{} and {}x{} matrices",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        // |P_A - P_B|^2 = |(1 - P_B) Q_A|^2 + |(1 - P_A) Q_B|^2
        let a_out = &self.q - &other.q * (other.q.adjoint() * &self.q);
        let b_out = &other.q - &self.q * (self.q.adjoint() * &other.q);
        Ok((a_out.norm_squared() + b_out.norm_squared()).sqrt())
    }

    /// Intersection of two spans of the same shape.
    pub fn intersection(&self, other: &OpSpace, tol: Tolerance) -> Result<OpSpace> {
        if self.shape() != other.shape() {
            return Err(Error::invalid("intersection of spans with different shapes"));
        }
        if self.dim() == 0 || other.dim() == 0 {
            return Ok(OpSpace::zero(self.rows, self.cols));
        }
        let (p, q) = (self.dim(), other.dim());
        let mut joint = CMat::zeros(self.q.nrows(), p + q);
        joint.columns_mut(0, p).copy_from(&self.q);
        joint.columns_mut(p, q).copy_from(&(-&other.q));
        let kernel = nullspace(&joint, tol)?;
        let vecs = &self.q * kernel.rows(0, p);
        Ok(OpSpace {
            rows: self.rows,
            cols: self.cols,
            q: range_basis(&vecs, tol),
        })
    }

    /// Span of the adjoints.
    pub fn adjoint(&self, tol: Tolerance) -> Result<OpSpace> {
        let mats: Vec<CMat> = self.elements().iter().map(|m| m.adjoint()).collect();
        OpSpace::from_spanning(self.cols, self.rows, &mats, tol)
    }
}

pub(crate) fn stack_vectorized(rows: usize, cols: usize, mats: &[CMat]) -> Result<CMat> {
    let mut out = CMat::zeros(rows * cols, mats.len());
    for (i, m) in mats.iter().enumerate() {
        if m.shape() != (rows, cols) {
            return Err(Error::invalid(format!(
                "expected {rows}x{cols} matrices, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        check_finite(m, "operator")?;
        out.column_mut(i).copy_from_slice(m.as_slice());
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SubspaceReport {
    pub equal: bool,
    pub distance: f64,
    pub dim_a: usize,
    pub dim_b: usize,
}

/// Compares the spans of two lists of equally shaped matrices.
pub fn subspace_equal(a: &[CMat], b: &[CMat], tol: Tolerance) -> Result<SubspaceReport> {
    let shape = a
        .first()
        .or_else(|| b.first())
        .map(|m| m.shape())
        .unwrap_or((0, 0));
    let sa = OpSpace::from_spanning(shape.0, shape.1, a, tol)?;
    let sb = OpSpace::from_spanning(shape.0, shape.1, b, tol)?;
    compare_spaces(&sa, &sb, tol)
}

pub fn compare_spaces(a: &OpSpace, b: &OpSpace, tol: Tolerance) -> Result<SubspaceReport> {
    let distance = a.projector_distance(b)?;
    Ok(SubspaceReport {
        equal: a.dim() == b.dim() && distance <= tol.rel_eps,
        distance,
        dim_a: a.dim(),
        dim_b: b.dim(),
    })
}
