//! Hilbert modules over a finite-dimensional von Neumann algebra `B ⊂ B(G)`.
//!
//! An [`AbstractModule`] is Gram data: `k` generators `x_i` and the
//! `B`-valued inner products `⟨x_i, x_j⟩`. [`tensor_with_g`] builds the
//! Hilbert space `H = E ⊙ G` from it and realizes each `x_i` as the operator
//! `L_i: g ↦ x_i ⊙ g` in `B(G, H)`. The right `B`-span of those operators is a
//! [`ConcreteModule`].
//!
//! In finite dimensions every linear subspace is strongly closed, so the von
//! Neumann module generated by a set of operators is just the linear span of
//! their right translates.

use crate::algebra::OperatorAlgebra;
use crate::error::{Error, Result};
use crate::linops::{
    self, frobenius, identity, psd_factor, CMat, OpSpace, Tolerance, C64,
};

/// `B`-valued inner product convention: `⟨x, y⟩ = x* y`, linear in `y`.
pub fn b_inner(x: &CMat, y: &CMat) -> CMat {
    x.adjoint() * y
}

#[derive(Clone, Debug)]
pub struct AbstractModule {
    algebra: OperatorAlgebra,
    gram: Vec<Vec<CMat>>,
}

impl AbstractModule {
    /// Validates the Gram data. Errors name the violated invariant:
    /// `gram shape`, `gram hermiticity`, `gram entries in algebra` or
    /// `gram positivity`.
    pub fn new(algebra: OperatorAlgebra, gram: Vec<Vec<CMat>>, tol: Tolerance) -> Result<Self> {
        let n = algebra.ambient_dim();
        let k = gram.len();
        if k == 0 {
            return Err(Error::validation("gram shape", "module needs at least one generator"));
        }
        for (i, row) in gram.iter().enumerate() {
            if row.len() != k {
                return Err(Error::validation(
                    "gram shape",
                    format!("row {i} has {} entries, expected {k}", row.len()),
                ));
            }
            for (j, g) in row.iter().enumerate() {
                if g.shape() != (n, n) {
                    return Err(Error::validation(
                        "gram shape",
                        format!("entry ({i},{j}) is {}x{}, expected {n}x{n}", g.nrows(), g.ncols()),
                    ));
                }
                if linops::check_finite(g, "gram entry").is_err() {
                    return Err(Error::validation(
                        "gram shape",
                        format!("entry ({i},{j}) has non-finite values"),
                    ));
                }
            }
        }
        let scale = gram
            .iter()
            .flatten()
            .map(frobenius)
            .fold(0.0f64, f64::max);
        for i in 0..k {
            for j in 0..k {
                let skew = frobenius(&(gram[i][j].adjoint() - &gram[j][i]));
                if !tol.accepts(skew, scale) {
                    return Err(Error::validation(
                        "gram hermiticity",
                        format!("<x_{i},x_{j}>* differs from <x_{j},x_{i}> by {skew:e}"),
                    ));
                }
                let out = algebra.space().residual(&gram[i][j])?;
                if !tol.accepts(out, scale) {
                    return Err(Error::validation(
                        "gram entries in algebra",
                        format!("entry ({i},{j}) is {out:e} away from the algebra"),
                    ));
                }
            }
        }
        let module = AbstractModule { algebra, gram };
        match psd_factor(&module.gram_block(), tol) {
            Ok(_) => Ok(module),
            Err(Error::NotPsd { min_eigenvalue, .. }) => Err(Error::validation(
                "gram positivity",
                format!("block Gram matrix has eigenvalue {min_eigenvalue:e}"),
            )),
            Err(e) => Err(e),
        }
    }

    pub fn algebra(&self) -> &OperatorAlgebra {
        &self.algebra
    }

    pub fn k(&self) -> usize {
        self.gram.len()
    }

    pub fn gram(&self) -> &[Vec<CMat>] {
        &self.gram
    }

    /// The `kn x kn` matrix `K[(i,g),(j,h)] = (G_ij)[g,h]`.
    pub fn gram_block(&self) -> CMat {
        let n = self.algebra.ambient_dim();
        let k = self.k();
        let mut out = CMat::zeros(k * n, k * n);
        for (i, row) in self.gram.iter().enumerate() {
            for (j, g) in row.iter().enumerate() {
                out.view_mut((i * n, j * n), (n, n)).copy_from(g);
            }
        }
        out
    }
}

/// `H = E ⊙ G` and the operators `L_i = L_{x_i}` in `B(G, H)`.
#[derive(Clone, Debug)]
pub struct TensorProduct {
    pub dim_h: usize,
    pub l: Vec<CMat>,
}

impl TensorProduct {
    /// The `m x kn` matrix `[L_1 ... L_k]`; its columns span `H`.
    pub fn columns(&self) -> CMat {
        hcat(&self.l, self.dim_h)
    }
}

pub(crate) fn hcat(mats: &[CMat], rows: usize) -> CMat {
    let cols: usize = mats.iter().map(|m| m.ncols()).sum();
    let mut out = CMat::zeros(rows, cols);
    let mut at = 0;
    for m in mats {
        out.columns_mut(at, m.ncols()).copy_from(m);
        at += m.ncols();
    }
    out
}

/// Builds `H = E ⊙ G` as the quotient-completion of `E ⊗ G` under
/// `⟨x_i ⊗ g, x_j ⊗ h⟩ = ⟨g, G_ij h⟩`, via a rank factorization `K = F* F` of
/// the block Gram matrix. `L_i` is the block of columns of `F` belonging to
/// generator `i`, so `L_i* L_j = G_ij`.
pub fn tensor_with_g(module: &AbstractModule, tol: Tolerance) -> Result<TensorProduct> {
    let n = module.algebra.ambient_dim();
    let f = psd_factor(&module.gram_block(), tol)?;
    let l = (0..module.k())
        .map(|i| f.factor.columns(i * n, n).into_owned())
        .collect();
    Ok(TensorProduct { dim_h: f.rank, l })
}

/// A von Neumann submodule `E ⊂ B(G, H)`: a linear span of `m x n` operators
/// closed under right multiplication by `B`.
#[derive(Clone, Debug)]
pub struct ConcreteModule {
    algebra: OperatorAlgebra,
    dim_h: usize,
    generators: Vec<CMat>,
    space: OpSpace,
}

impl ConcreteModule {
    pub fn algebra(&self) -> &OperatorAlgebra {
        &self.algebra
    }

    pub fn dim_g(&self) -> usize {
        self.algebra.ambient_dim()
    }

    pub fn dim_h(&self) -> usize {
        self.dim_h
    }

    /// Generators as a right module.
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

    pub fn contains(&self, x: &CMat, tol: Tolerance) -> Result<bool> {
        self.space.contains(x, tol)
    }

    /// Rank of the joint column space of the generators, i.e. the dimension
    /// of `span E G` inside `H`.
    pub fn total_rank(&self, tol: Tolerance) -> usize {
        linops::numerical_rank(&hcat(&self.generators, self.dim_h), tol)
    }

    /// Worst relative residual of the module invariants: right-action
    /// closure and `B`-valued inner products of basis elements.
    pub fn invariant_residual(&self) -> Result<f64> {
        let basis = self.basis();
        let b_basis = self.algebra.basis();
        let translates: Vec<CMat> = basis
            .iter()
            .flat_map(|t| b_basis.iter().map(move |b| t * b))
            .collect();
        let mut worst = self.space.worst_relative_residual(&translates)?;
        worst = worst.max(self.algebra.space().worst_relative_residual(&gram_of(&basis))?);
        Ok(worst)
    }
}

fn gram_of(ops: &[CMat]) -> Vec<CMat> {
    let mut out = Vec::with_capacity(ops.len() * ops.len());
    for a in ops {
        for b in ops {
            out.push(b_inner(a, b));
        }
    }
    out
}

/// The von Neumann module generated by `raw`: the span of `T b` over raw
/// operators `T` and basis elements `b` of `B`.
pub fn module_span_closure(
    raw: &[CMat],
    dim_h: usize,
    algebra: &OperatorAlgebra,
    tol: Tolerance,
) -> Result<ConcreteModule> {
    let n = algebra.ambient_dim();
    for t in raw {
        if t.shape() != (dim_h, n) {
            return Err(Error::invalid(format!(
                "module operator is {}x{}, expected {dim_h}x{n}",
                t.nrows(),
                t.ncols()
            )));
        }
    }
    let b_basis = algebra.basis();
    let translates: Vec<CMat> = raw
        .iter()
        .flat_map(|t| b_basis.iter().map(move |b| t * b))
        .collect();
    let space = OpSpace::from_spanning(dim_h, n, &translates, tol)?;
    let module = ConcreteModule {
        algebra: algebra.clone(),
        dim_h,
        generators: raw.to_vec(),
        space,
    };
    let off = algebra
        .space()
        .worst_relative_residual(&gram_of(&module.basis()))?;
    if off > tol.cutoff(1.0) {
        return Err(Error::NotABModule {
            what: "inner products",
            residual: off,
        });
    }
    Ok(module)
}

/// Wraps a span already known to be right-`B`-closed (for example an
/// intertwiner space), checking both module invariants.
pub(crate) fn module_from_space(
    space: OpSpace,
    algebra: &OperatorAlgebra,
    tol: Tolerance,
) -> Result<ConcreteModule> {
    let (dim_h, _) = space.shape();
    let module = ConcreteModule {
        algebra: algebra.clone(),
        dim_h,
        generators: space.elements(),
        space,
    };
    let residual = module.invariant_residual()?;
    if residual > tol.cutoff(1.0) {
        return Err(Error::ModuleInvariant {
            what: "right action closure",
            residual,
        });
    }
    Ok(module)
}

/// `⟨x, y⟩ = x* y` for module elements, with membership checks.
pub fn inner_product(x: &CMat, y: &CMat, module: &ConcreteModule, tol: Tolerance) -> Result<CMat> {
    for (name, v) in [("x", x), ("y", y)] {
        let r = module.space.residual(v)?;
        if !tol.accepts(r, frobenius(v)) {
            return Err(Error::ModuleInvariant {
                what: if name == "x" { "x in module" } else { "y in module" },
                residual: r,
            });
        }
    }
    let value = b_inner(x, y);
    let r = module.algebra.space().residual(&value)?;
    if !tol.accepts(r, frobenius(&value)) {
        return Err(Error::ModuleInvariant {
            what: "inner product in algebra",
            residual: r,
        });
    }
    Ok(value)
}

#[derive(Clone, Debug)]
pub struct PolarParts {
    /// Partial isometry `x₀` with `x₀ |x| = x`, zero on the kernel of `|x|`.
    pub isometry: CMat,
    /// `|x| = (x* x)^{1/2}`.
    pub modulus: CMat,
}

/// Polar decomposition `x = x₀ |x|`.
///
/// Computed from the SVD `x = U Σ V*` as `|x| = V Σ V*` and `x₀ = U_r V_r*`
/// over singular values above the cutoff; this is the same `|x|` as
/// `sqrt_psd(x* x)` without squaring the condition number.
pub fn polar_parts(x: &CMat, tol: Tolerance) -> Result<PolarParts> {
    linops::check_finite(x, "polar input")?;
    let (m, n) = x.shape();
    if x.is_empty() {
        return Ok(PolarParts {
            isometry: CMat::zeros(m, n),
            modulus: CMat::zeros(n, n),
        });
    }
    let svd = linops::svd(x, true, true);
    let (u, v_t) = (svd.u.unwrap(), svd.v_t.unwrap());
    let smax = svd.singular_values.iter().fold(0.0f64, |a, &b| a.max(b));
    let cutoff = tol.cutoff(smax);
    let mut isometry = CMat::zeros(m, n);
    let mut modulus = CMat::zeros(n, n);
    for (i, &s) in svd.singular_values.iter().enumerate() {
        let v = v_t.row(i).adjoint();
        modulus += &v * v.adjoint() * C64::new(s, 0.0);
        if s > cutoff {
            isometry += u.column(i) * v.adjoint();
        }
    }
    Ok(PolarParts { isometry, modulus })
}

/// Applies the map with Choi matrix `choi = Σ_ab e_ab ⊗ φ(e_ab)` to `x`.
pub fn apply_choi(choi: &CMat, x: &CMat) -> CMat {
    let n = x.nrows();
    let mut out = CMat::zeros(n, n);
    for a in 0..n {
        for b in 0..n {
            let c = x[(a, b)];
            if c != C64::new(0.0, 0.0) {
                out += choi.view((a * n, b * n), (n, n)) * c;
            }
        }
    }
    out
}

/// Choi matrix of `x ↦ Σ_s K_s x K_s*`, namely `Σ_s vec(K_s) vec(K_s)*`.
pub fn choi_from_kraus(kraus: &[CMat], n: usize) -> CMat {
    let mut choi = CMat::zeros(n * n, n * n);
    for k in kraus {
        let v = linops::vectorize(k);
        choi += &v * v.adjoint();
    }
    choi
}

/// Basis used for GNS generators: the identity followed by the remaining
/// (Hilbert-Schmidt orthonormal, traceless) basis elements of `B`.
pub fn gns_basis(algebra: &OperatorAlgebra, tol: Tolerance) -> Result<Vec<CMat>> {
    let n = algebra.ambient_dim();
    let id = identity(n);
    let unit = &id * C64::new(1.0 / (n as f64).sqrt(), 0.0);
    let mut basis = algebra.basis();
    if frobenius(&(&basis[0] - &unit)) < 1e-12 {
        basis[0] = id;
        return Ok(basis);
    }
    let traceless: Vec<CMat> = basis
        .iter()
        .map(|b| b - &unit * unit.dot(b))
        .collect();
    let rest = OpSpace::from_spanning(n, n, &traceless, tol)?;
    Ok(std::iter::once(id).chain(rest.elements()).collect())
}

/// GNS module of a completely positive map `φ: B → B` given by its Choi
/// matrix. Generators are `a_i ξ` for `a_i` in [`gns_basis`], with
/// `⟨a_i ξ, a_j ξ⟩ = φ(a_i* a_j)`.
pub fn gns_module(algebra: &OperatorAlgebra, choi: &CMat, tol: Tolerance) -> Result<AbstractModule> {
    let n = algebra.ambient_dim();
    if choi.shape() != (n * n, n * n) {
        return Err(Error::invalid(format!(
            "Choi matrix is {}x{}, expected {}x{}",
            choi.nrows(),
            choi.ncols(),
            n * n,
            n * n
        )));
    }
    linops::check_finite(choi, "Choi matrix")?;
    let scale = frobenius(choi);
    let skew = frobenius(&(choi - choi.adjoint()));
    if !tol.accepts(skew, scale) {
        return Err(Error::NotCp {
            min_eigenvalue: f64::NAN,
            threshold: tol.cutoff(scale),
        });
    }
    match psd_factor(choi, tol) {
        Ok(_) => {}
        Err(Error::NotPsd {
            min_eigenvalue,
            threshold,
        }) => {
            return Err(Error::NotCp {
                min_eigenvalue,
                threshold,
            })
        }
        Err(e) => return Err(e),
    }
    let basis = gns_basis(algebra, tol)?;
    for a in &basis {
        let image = apply_choi(choi, a);
        let r = algebra.space().residual(&image)?;
        let allowed = tol.cutoff(frobenius(&image).max(1.0));
        if r > allowed {
            return Err(Error::NotBValued { residual: r, allowed });
        }
    }
    let gram = basis
        .iter()
        .map(|ai| {
            basis
                .iter()
                .map(|aj| apply_choi(choi, &(ai.adjoint() * aj)))
                .collect()
        })
        .collect();
    AbstractModule::new(algebra.clone(), gram, tol)
}
