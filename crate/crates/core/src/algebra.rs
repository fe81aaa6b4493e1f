//! Finite-dimensional von Neumann algebras given by generators.
//!
//! In finite dimensions a von Neumann algebra is just a unital, *-closed
//! span of matrices, so everything here is subspace arithmetic on `M_n`.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::linops::{
    self, frobenius, hermitian_eigen, identity, nullspace, range_basis, stack_vectorized,
    unvectorize, CMat, OpSpace, SubspaceReport, Tolerance, C64,
};

/// Passes allowed in [`generate_algebra`] before giving up.
pub const MAX_CLOSURE_PASSES: usize = 64;

/// A unital *-subalgebra of `M_n` together with the generators it came from.
///
/// The basis is orthonormal for the Hilbert-Schmidt inner product. Algebras
/// built by [`generate_algebra`] list `I / sqrt(n)` first.
#[derive(Clone, Debug)]
pub struct OperatorAlgebra {
    n: usize,
    generators: Vec<CMat>,
    space: OpSpace,
}

impl OperatorAlgebra {
    pub fn ambient_dim(&self) -> usize {
        self.n
    }

    pub fn generators(&self) -> &[CMat] {
        &self.generators
    }

    pub fn dim(&self) -> usize {
        self.space.dim()
    }

    pub fn space(&self) -> &OpSpace {
        &self.space
    }

    pub fn basis(&self) -> Vec<CMat> {
        self.space.elements()
    }

    pub fn basis_element(&self, i: usize) -> CMat {
        self.space.element(i)
    }

    pub fn contains(&self, m: &CMat, tol: Tolerance) -> Result<bool> {
        self.space.contains(m, tol)
    }

    /// Wraps a span that is known to be a unital *-algebra.
    pub(crate) fn from_closed_span(n: usize, generators: Vec<CMat>, space: OpSpace) -> Self {
        OperatorAlgebra {
            n,
            generators,
            space,
        }
    }

    /// Worst violation of the algebra invariants: orthonormal basis, unit in
    /// the span, closure under products and adjoints of basis elements.
    pub fn invariant_residual(&self) -> Result<f64> {
        let q = self.space.columns();
        let gram = q.adjoint() * q;
        let mut worst = frobenius(&(gram - identity(self.dim())));
        worst = worst.max(self.space.residual(&identity(self.n))?);
        let basis = self.basis();
        let mut products = Vec::with_capacity(basis.len() * (basis.len() + 1));
        for a in &basis {
            products.push(a.adjoint());
            for b in &basis {
                products.push(a * b);
            }
        }
        worst = worst.max(self.space.worst_relative_residual(&products)?);
        Ok(worst)
    }

    /// All generators followed by the adjoints of the non-hermitian ones.
    pub(crate) fn star_generators(&self, tol: Tolerance) -> Vec<CMat> {
        with_adjoints(&self.generators, tol)
    }
}

fn identity_space(n: usize) -> OpSpace {
    let mut q = CMat::zeros(n * n, 1);
    let s = C64::new(1.0 / (n as f64).sqrt(), 0.0);
    for i in 0..n {
        q[(i * n + i, 0)] = s;
    }
    OpSpace::from_orthonormal_columns(n, n, q)
}

pub(crate) fn with_adjoints(gens: &[CMat], tol: Tolerance) -> Vec<CMat> {
    let mut out: Vec<CMat> = gens.to_vec();
    for g in gens {
        let skew = frobenius(&(g - g.adjoint()));
        if !tol.accepts(skew, frobenius(g)) {
            out.push(g.adjoint());
        }
    }
    out
}

fn check_square(gens: &[CMat], n: usize) -> Result<()> {
    for (i, g) in gens.iter().enumerate() {
        if g.shape() != (n, n) {
            return Err(Error::invalid(format!(
                "generator {i} is {}x{}, expected {n}x{n}",
                g.nrows(),
                g.ncols()
            )));
        }
        linops::check_finite(g, "generator")?;
    }
    Ok(())
}

/// Smallest unital *-algebra containing `generators`.
///
/// Starts from `span{I, g, g*}` and repeatedly multiplies the newest basis
/// elements on the right by the generators and their adjoints until the span
/// stops growing.
pub fn generate_algebra(generators: &[CMat], n: usize, tol: Tolerance) -> Result<OperatorAlgebra> {
    if n == 0 {
        return Err(Error::invalid("algebra on a zero-dimensional space"));
    }
    check_square(generators, n)?;
    let star = with_adjoints(generators, tol);
    let (space, _) = identity_space(n).extend(&star, tol)?;
    let space = close_under(space, &star, tol)?;
    Ok(OperatorAlgebra {
        n,
        generators: generators.to_vec(),
        space,
    })
}

/// Closes `space` under right multiplication by `star`.
pub(crate) fn close_under(mut space: OpSpace, star: &[CMat], tol: Tolerance) -> Result<OpSpace> {
    let (n, _) = space.shape();
    let mut done = 0;
    for _ in 0..MAX_CLOSURE_PASSES {
        let fresh: Vec<CMat> = (done..space.dim()).map(|i| space.element(i)).collect();
        done = space.dim();
        let products: Vec<CMat> = fresh
            .iter()
            .flat_map(|b| star.iter().map(move |s| b * s))
            .collect();
        let (next, grew) = space.extend(&products, tol)?;
        space = next;
        if !grew {
            return Ok(space);
        }
        if space.dim() > n * n {
            return Err(Error::InternalInconsistency(format!(
                "generated span has dimension {} > {}",
                space.dim(),
                n * n
            )));
        }
    }
    Err(Error::ClosureDidNotConverge {
        passes: MAX_CLOSURE_PASSES,
    })
}

/// Coefficients for the spectral prefilter. Fixed so commutants are
/// reproducible.
fn prefilter_weight(i: usize) -> C64 {
    let t = (i as f64 + 1.0) * 0.618_033_988_749_895;
    let r = 1.0 + (t - t.floor());
    C64::from_polar(r, 2.399_963_229_728_653 * (i as f64 + 1.0))
}

/// Orthonormal basis (vectorized, as columns) of all `X` commuting with
/// every matrix in `gens`.
///
/// A generic hermitian combination `h` of the generators is diagonalized
/// first; anything commuting with all generators maps each eigenspace of `h`
/// into itself, so the search can be restricted to the block-diagonal space
/// `span{u_p u_q^* : p, q in one eigenvalue cluster}`. The exact stacked
/// commutation system is then solved on that much smaller space.
pub(crate) fn commutant_space(n: usize, gens: &[CMat], tol: Tolerance) -> Result<OpSpace> {
    let candidates = if gens.is_empty() {
        identity(n * n)
    } else {
        let mut h = CMat::zeros(n, n);
        for (i, g) in gens.iter().enumerate() {
            let w = prefilter_weight(i);
            h += g * w + g.adjoint() * w.conj();
        }
        let (values, u) = hermitian_eigen(&h);
        let scale = values.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        let gap = tol.rel_eps.sqrt() * scale;
        let mut clusters: Vec<(usize, usize)> = Vec::new();
        let mut start = 0;
        for i in 1..=n {
            if i == n || values[i - 1] - values[i] > gap {
                clusters.push((start, i));
                start = i;
            }
        }
        let d: usize = clusters.iter().map(|(a, b)| (b - a) * (b - a)).sum();
        let mut v = CMat::zeros(n * n, d);
        let mut col = 0;
        for &(a, b) in &clusters {
            for p in a..b {
                for q in a..b {
                    let x = u.column(p) * u.column(q).adjoint();
                    v.column_mut(col).copy_from_slice(x.as_slice());
                    col += 1;
                }
            }
        }
        v
    };
    if gens.is_empty() {
        return Ok(OpSpace::from_orthonormal_columns(n, n, candidates));
    }
    let d = candidates.ncols();
    let mut system = CMat::zeros(gens.len() * n * n, d);
    for l in 0..d {
        let x = unvectorize(candidates.column(l).as_slice(), n, n);
        for (gi, g) in gens.iter().enumerate() {
            let c = g * &x - &x * g;
            system
                .view_mut((gi * n * n, l), (n * n, 1))
                .copy_from_slice(c.as_slice());
        }
    }
    let kernel = nullspace(&system, tol)?;
    Ok(OpSpace::from_orthonormal_columns(n, n, &candidates * kernel))
}

/// The commutant `A'` of `A`, computed from the commutation constraints
/// against the generators of `A` and their adjoints.
pub fn commutant(a: &OperatorAlgebra, tol: Tolerance) -> Result<OperatorAlgebra> {
    let space = commutant_space(a.n, &a.star_generators(tol), tol)?;
    let generators = space.elements();
    Ok(OperatorAlgebra::from_closed_span(a.n, generators, space))
}

/// Compares `A''` with `A`.
pub fn double_commutant_check(a: &OperatorAlgebra, tol: Tolerance) -> Result<SubspaceReport> {
    let second = commutant(&commutant(a, tol)?, tol)?;
    linops::compare_spaces(second.space(), a.space(), tol)
}

/// One piece `A g` of a cyclic decomposition.
#[derive(Clone, Debug)]
pub struct CyclicPiece {
    pub vector: DVector<C64>,
    /// Orthonormal columns spanning `A g`.
    pub subspace: CMat,
}

impl CyclicPiece {
    pub fn dim(&self) -> usize {
        self.subspace.ncols()
    }

    pub fn projector(&self) -> CMat {
        &self.subspace * self.subspace.adjoint()
    }
}

/// Splits the ambient space into mutually orthogonal cyclic subspaces `A g`.
///
/// Each new vector is the first standard basis vector that sticks out of the
/// span consumed so far, projected onto the complement. "Sticks out" means a
/// complement component of norm at least `1/sqrt(2n)`; one always exists
/// while the complement is nonzero. `start`, when given, is used as the first
/// vector.
pub fn cyclic_decomposition(
    a: &OperatorAlgebra,
    start: Option<&DVector<C64>>,
    tol: Tolerance,
) -> Result<Vec<CyclicPiece>> {
    let n = a.n;
    let basis = a.basis();
    let mut consumed = CMat::zeros(n, 0);
    let mut pieces = Vec::new();
    let threshold = 1.0 / (2.0 * n as f64).sqrt();

    let mut next = match start {
        Some(g) => {
            if g.len() != n {
                return Err(Error::invalid("start vector has the wrong length"));
            }
            let norm = g.norm();
            if norm == 0.0 {
                return Err(Error::invalid("start vector is zero"));
            }
            Some(g / C64::new(norm, 0.0))
        }
        None => None,
    };

    while consumed.ncols() < n {
        let g = match next.take() {
            Some(g) => g,
            None => {
                let mut found = None;
                for j in 0..n {
                    let mut e = DVector::<C64>::zeros(n);
                    e[j] = C64::new(1.0, 0.0);
                    let r = &e - &consumed * (consumed.adjoint() * &e);
                    let norm = r.norm();
                    if norm >= threshold {
                        found = Some(r / C64::new(norm, 0.0));
                        break;
                    }
                }
                found.ok_or_else(|| {
                    Error::InternalInconsistency("no cyclic vector left in the complement".into())
                })?
            }
        };
        let images: Vec<CMat> = basis
            .iter()
            .map(|b| {
                let v = b * &g;
                CMat::from_column_slice(n, 1, v.as_slice())
            })
            .collect();
        let stacked = stack_vectorized(n, 1, &images)?;
        let sub = range_basis(&stacked, tol);
        // Strip any numerical leakage into pieces already taken.
        let sub = &sub - &consumed * (consumed.adjoint() * &sub);
        let sub = range_basis(&sub, tol);
        let mut grown = CMat::zeros(n, consumed.ncols() + sub.ncols());
        grown.columns_mut(0, consumed.ncols()).copy_from(&consumed);
        grown.columns_mut(consumed.ncols(), sub.ncols()).copy_from(&sub);
        consumed = grown;
        pieces.push(CyclicPiece {
            vector: g,
            subspace: sub,
        });
    }
    Ok(pieces)
}
