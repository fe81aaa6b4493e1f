//! Commutant lifting and intertwiner spaces.
//!
//! Given a concrete module `E ⊂ B(G, H)` over `B`, the commutant `B'` acts on
//! `H` through `ρ'(b') = id_E ⊙ b'`, characterized by `ρ'(b') x = x b'` for
//! every `x ∈ E`. The intertwiners of `b'` and `ρ'(b')` form the `B'`-center
//! `C_{B'}(B(G,H))`; the operators on `H` leaving `E` invariant together with
//! their adjoints form `B^a(E)`, which should coincide with `ρ'(B')'`.
//!
//! Everything is assembled in the linking algebra
//!
//! ```text
//!     M = [ B   E*     ]   acting on G ⊕ H
//!         [ E   B^a(E) ]
//! ```
//!
//! whose commutant is `{ b' ⊕ ρ'(b') }`.

use crate::algebra::{commutant, commutant_space, generate_algebra, with_adjoints, OperatorAlgebra};
use crate::error::{Error, Result};
use crate::hilbmod::{hcat, module_from_space, ConcreteModule};
use crate::linops::{
    self, compare_spaces, frobenius, identity, kron, nullspace, pseudo_inverse, CMat, OpSpace,
    SubspaceReport, Tolerance, C64,
};

/// A linear map `B' → B(H)` given by the images of an orthonormal basis of
/// the source algebra.
#[derive(Clone, Debug)]
pub struct Representation {
    source: OperatorAlgebra,
    dim_h: usize,
    images: Vec<CMat>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct HomomorphismResiduals {
    pub unital: f64,
    pub multiplicative: f64,
    pub star: f64,
}

impl HomomorphismResiduals {
    pub fn worst(&self) -> f64 {
        self.unital.max(self.multiplicative).max(self.star)
    }
}

impl Representation {
    pub fn new(source: OperatorAlgebra, dim_h: usize, images: Vec<CMat>) -> Result<Self> {
        if images.len() != source.dim() {
            return Err(Error::invalid(format!(
                "{} images for a source of dimension {}",
                images.len(),
                source.dim()
            )));
        }
        if images.iter().any(|m| m.shape() != (dim_h, dim_h)) {
            return Err(Error::invalid("representation images have the wrong shape"));
        }
        Ok(Representation {
            source,
            dim_h,
            images,
        })
    }

    pub fn source(&self) -> &OperatorAlgebra {
        &self.source
    }

    pub fn dim_h(&self) -> usize {
        self.dim_h
    }

    /// Images of the source basis elements, in basis order.
    pub fn images(&self) -> &[CMat] {
        &self.images
    }

    /// `ρ'(b')`, extended linearly from the basis.
    pub fn apply(&self, b: &CMat) -> Result<CMat> {
        let coeffs = self.source.space().coefficients(b)?;
        let mut out = CMat::zeros(self.dim_h, self.dim_h);
        for (c, img) in coeffs.iter().zip(&self.images) {
            out += img * *c;
        }
        Ok(out)
    }

    /// Residuals of `ρ(1) = 1`, `ρ(ab) = ρ(a)ρ(b)` and `ρ(a*) = ρ(a)*` over
    /// all pairs of source basis elements.
    pub fn homomorphism_residuals(&self) -> Result<HomomorphismResiduals> {
        let basis = self.source.basis();
        let n = self.source.ambient_dim();
        let mut r = HomomorphismResiduals {
            unital: frobenius(&(self.apply(&identity(n))? - identity(self.dim_h))),
            ..Default::default()
        };
        for (p, a) in basis.iter().enumerate() {
            let star = self.apply(&a.adjoint())? - self.images[p].adjoint();
            r.star = r.star.max(frobenius(&star));
            for (q, b) in basis.iter().enumerate() {
                let d = self.apply(&(a * b))? - &self.images[p] * &self.images[q];
                r.multiplicative = r.multiplicative.max(frobenius(&d));
            }
        }
        Ok(r)
    }

    /// Largest `|ρ(b'_j) T − T b'_j|` over source basis elements and `ops`.
    pub fn intertwining_residual(&self, ops: &[CMat]) -> Result<f64> {
        let mut worst = 0.0f64;
        for (b, img) in self.source.basis().iter().zip(&self.images) {
            for t in ops {
                worst = worst.max(frobenius(&(img * t - t * b)));
            }
        }
        Ok(worst)
    }
}

/// The commutant lifting `ρ'` of `B'` to `H`, solved from
/// `ρ'(b') T = T b'` for every module basis element `T`.
///
/// The columns of the module operators span `H`, so the system has at most
/// one solution; it is solved by least squares and rejected when the
/// residual exceeds the tolerance.
pub fn commutant_lifting(
    bprime: &OperatorAlgebra,
    module: &ConcreteModule,
    tol: Tolerance,
) -> Result<Representation> {
    let m = module.dim_h();
    if bprime.ambient_dim() != module.dim_g() {
        return Err(Error::invalid("commutant acts on a different space than the module"));
    }
    let basis = module.basis();
    let w = hcat(&basis, m);
    let rank = linops::numerical_rank(&w, tol);
    if rank != m {
        return Err(Error::NotWellDefined(format!(
            "module operators span a {rank}-dimensional subspace of H (dim {m})"
        )));
    }
    let w_pinv = pseudo_inverse(&w, tol);
    let mut images = Vec::with_capacity(bprime.dim());
    for b in bprime.basis() {
        let shifted: Vec<CMat> = basis.iter().map(|t| t * &b).collect();
        let z = hcat(&shifted, m);
        let r = &z * &w_pinv;
        let residual = frobenius(&(&r * &w - &z));
        let allowed = tol.cutoff(frobenius(&z).max(1.0));
        if residual > allowed {
            return Err(Error::NotWellDefined(format!(
                "intertwining system inconsistent: residual {residual:e} (allowed {allowed:e})"
            )));
        }
        images.push(r);
    }
    Representation::new(bprime.clone(), m, images)
}

/// `C_{B'}(B(G,H)) = { x : ρ'(b') x = x b' for all b' ∈ B' }`, as a module
/// over `B`.
pub fn center_intertwiners(
    algebra: &OperatorAlgebra,
    rho: &Representation,
    tol: Tolerance,
) -> Result<ConcreteModule> {
    let n = algebra.ambient_dim();
    let m = rho.dim_h();
    if n * m == 0 {
        return module_from_space(OpSpace::zero(m, n), algebra, tol);
    }
    let basis = rho.source().basis();
    let mut system = CMat::zeros(basis.len() * m * n, m * n);
    let (id_n, id_m) = (identity(n), identity(m));
    for (j, (b, img)) in basis.iter().zip(rho.images()).enumerate() {
        // vec(R X − X b) = (1_n ⊗ R − bᵀ ⊗ 1_m) vec X
        let block = kron(&id_n, img) - kron(&b.transpose(), &id_m);
        system.view_mut((j * m * n, 0), (m * n, m * n)).copy_from(&block);
    }
    let kernel = nullspace(&system, tol)?;
    module_from_space(OpSpace::from_orthonormal_columns(m, n, kernel), algebra, tol)
}

/// `B^a(E)` computed two ways.
#[derive(Clone, Debug)]
pub struct AdjointableAlgebras {
    /// Operators `a` on `H` with `a E ⊆ E` and `a* E ⊆ E`.
    pub direct: OperatorAlgebra,
    /// `ρ'(B')'`.
    pub via_commutant: OperatorAlgebra,
}

impl AdjointableAlgebras {
    pub fn compare(&self, tol: Tolerance) -> Result<SubspaceReport> {
        compare_spaces(self.direct.space(), self.via_commutant.space(), tol)
    }
}

pub fn adjointable_algebra(
    module: &ConcreteModule,
    rho: &Representation,
    tol: Tolerance,
) -> Result<AdjointableAlgebras> {
    let (n, m) = (module.dim_g(), module.dim_h());
    if m == 0 {
        return Err(Error::invalid("adjointable operators on a zero module"));
    }
    // a E ⊆ E iff (1 − P_E) vec(a L) = 0 for each module generator L, since
    // then a L b ∈ E b ⊆ E as well.
    let q = module.space().columns();
    let complement = identity(m * n) - q * q.adjoint();
    let id_m = identity(m);
    let gens = module.generators();
    let mut system = CMat::zeros(gens.len().max(1) * m * n, m * m);
    for (i, l) in gens.iter().enumerate() {
        let block = &complement * kron(&l.transpose(), &id_m);
        system.view_mut((i * m * n, 0), (m * n, m * m)).copy_from(&block);
    }
    let invariant = OpSpace::from_orthonormal_columns(m, m, nullspace(&system, tol)?);
    let starred = invariant.adjoint(tol)?;
    let both = invariant.intersection(&starred, tol)?;
    let direct = OperatorAlgebra::from_closed_span(m, both.elements(), both);

    let image = generate_algebra(rho.images(), m, tol)?;
    let via_commutant = commutant(&image, tol)?;
    Ok(AdjointableAlgebras {
        direct,
        via_commutant,
    })
}

/// Weights for the generic elements used as compact generating sets.
fn generic_weight(seed: usize, i: usize) -> C64 {
    let t = ((i + 1) as f64 * 0.754_877_666_246_692_7 + seed as f64 * 0.569_840_290_998_053) % 1.0;
    C64::from_polar(0.5 + t, 2.0 * std::f64::consts::PI * t + seed as f64)
}

/// Two generic elements of `a` that generate it, or its basis if they do
/// not.
fn compact_generators(a: &OperatorAlgebra, tol: Tolerance) -> Result<Vec<CMat>> {
    let basis = a.basis();
    if basis.len() <= 2 {
        return Ok(basis);
    }
    let mut pair = Vec::with_capacity(2);
    for seed in 0..2 {
        let mut g = CMat::zeros(a.ambient_dim(), a.ambient_dim());
        for (i, b) in basis.iter().enumerate() {
            g += b * generic_weight(seed, i);
        }
        pair.push(g);
    }
    let generated = generate_algebra(&pair, a.ambient_dim(), tol)?;
    if generated.dim() == a.dim() {
        Ok(pair)
    } else {
        Ok(basis)
    }
}

/// The linking algebra on `G ⊕ H`.
#[derive(Clone, Debug)]
pub struct LinkingAlgebra {
    pub algebra: OperatorAlgebra,
    pub dim_g: usize,
    pub dim_h: usize,
}

fn embed(block: &CMat, at: (usize, usize), total: usize) -> CMat {
    let mut out = CMat::zeros(total, total);
    out.view_mut(at, block.shape()).copy_from(block);
    out
}

/// Which corner of `G ⊕ H` an element lives in: (row space, column space),
/// with `false` for `G` and `true` for `H`.
type Corner = (bool, bool);

/// Assembles `M = [[B, E*], [E, Ba]]` on `G ⊕ H`.
///
/// The union of the embedded bases is checked to be closed under right
/// multiplication by the generators of `M` (generators of `B`, module
/// generators of `E` and their adjoints, a generating set of `Ba`): one pass
/// of the algebra closure that must not add anything. Products between
/// incompatible corners vanish and are skipped.
pub fn build_linking_algebra(
    b: &OperatorAlgebra,
    module: &ConcreteModule,
    ba: &OperatorAlgebra,
    tol: Tolerance,
) -> Result<LinkingAlgebra> {
    let (n, m) = (b.ambient_dim(), module.dim_h());
    if module.dim_g() != n || ba.ambient_dim() != m {
        return Err(Error::InconsistentInputs("block dimensions do not match".into()));
    }
    let total = n + m;
    let estar = module.space().adjoint(tol)?;
    let corners: [(Corner, &OpSpace); 4] = [
        ((false, false), b.space()),
        ((true, false), module.space()),
        ((false, true), &estar),
        ((true, true), ba.space()),
    ];
    let space_of = |c: Corner| corners.iter().find(|(k, _)| *k == c).map(|(_, s)| *s).unwrap();

    let mut gens: Vec<(Corner, CMat)> = Vec::new();
    for g in with_adjoints(b.generators(), tol) {
        gens.push(((false, false), g));
    }
    for l in module.generators() {
        gens.push(((true, false), l.clone()));
        gens.push(((false, true), l.adjoint()));
    }
    for g in with_adjoints(&compact_generators(ba, tol)?, tol) {
        gens.push(((true, true), g));
    }

    let mut worst = 0.0f64;
    for &(corner, space) in &corners {
        for x in space.elements() {
            for (gc, g) in &gens {
                if corner.1 != gc.0 {
                    continue;
                }
                let p = &x * g;
                let target = space_of((corner.0, gc.1));
                worst = worst.max(target.residual(&p)? / frobenius(&p).max(1.0));
            }
        }
    }
    if worst > tol.cutoff(1.0) {
        return Err(Error::InconsistentInputs(format!(
            "linking algebra is not closed: product residual {worst:e}"
        )));
    }

    let offset = |c: Corner| {
        (
            if c.0 { n } else { 0 },
            if c.1 { n } else { 0 },
        )
    };
    let dim: usize = corners.iter().map(|(_, s)| s.dim()).sum();
    let mut q = CMat::zeros(total * total, dim);
    let mut col = 0;
    for &(corner, space) in &corners {
        for x in space.elements() {
            let e = embed(&x, offset(corner), total);
            q.column_mut(col).copy_from_slice(e.as_slice());
            col += 1;
        }
    }
    let space = OpSpace::from_orthonormal_columns(total, total, q);
    let generators = gens
        .iter()
        .map(|(c, g)| embed(g, offset(*c), total))
        .collect();
    let algebra = OperatorAlgebra::from_closed_span(total, generators, space);
    Ok(LinkingAlgebra {
        algebra,
        dim_g: n,
        dim_h: m,
    })
}

#[derive(Clone, Copy, Debug)]
pub struct LinkingCommutantReport {
    pub span: SubspaceReport,
    pub dim_commutant: usize,
    pub dim_bprime: usize,
}

impl LinkingCommutantReport {
    pub fn holds(&self) -> bool {
        self.span.equal && self.dim_commutant == self.dim_bprime
    }
}

/// Compares `M'` with `{ b' ⊕ ρ'(b') : b' ∈ B' }`.
pub fn check_linking_commutant(
    linking: &LinkingAlgebra,
    rho: &Representation,
    tol: Tolerance,
) -> Result<LinkingCommutantReport> {
    let total = linking.dim_g + linking.dim_h;
    let mprime = commutant_space(total, &linking.algebra.star_generators(tol), tol)?;
    let diagonal: Vec<CMat> = rho
        .source()
        .basis()
        .iter()
        .zip(rho.images())
        .map(|(b, r)| {
            let mut d = embed(b, (0, 0), total);
            d.view_mut((linking.dim_g, linking.dim_g), r.shape()).copy_from(r);
            d
        })
        .collect();
    let expected = OpSpace::from_spanning(total, total, &diagonal, tol)?;
    Ok(LinkingCommutantReport {
        span: compare_spaces(&mprime, &expected, tol)?,
        dim_commutant: mprime.dim(),
        dim_bprime: rho.source().dim(),
    })
}

#[derive(Clone, Copy, Debug)]
pub struct BicommutantReport {
    /// `M''` against `M`.
    pub double: SubspaceReport,
    /// The `(H, G)` corner of `M''` against the intertwiner space.
    pub corner: SubspaceReport,
}

impl BicommutantReport {
    pub fn holds(&self) -> bool {
        self.double.equal && self.corner.equal
    }
}

pub fn check_linking_bicommutant(
    linking: &LinkingAlgebra,
    center: &ConcreteModule,
    tol: Tolerance,
) -> Result<BicommutantReport> {
    let (n, m) = (linking.dim_g, linking.dim_h);
    let total = n + m;
    let mprime = commutant_space(total, &linking.algebra.star_generators(tol), tol)?;
    let second = commutant_space(total, &mprime.elements(), tol)?;
    let double = compare_spaces(&second, linking.algebra.space(), tol)?;
    let corners: Vec<CMat> = second
        .elements()
        .iter()
        .map(|x| x.view((n, 0), (m, n)).into_owned())
        .collect();
    let corner_space = OpSpace::from_spanning(m, n, &corners, tol)?;
    let corner = compare_spaces(&corner_space, center.space(), tol)?;
    Ok(BicommutantReport { double, corner })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::generate_algebra;
    use crate::hilbmod::{module_span_closure, tensor_with_g, AbstractModule};
    use crate::linops::{from_real, matrix_unit};

    fn tol() -> Tolerance {
        Tolerance::default()
    }

    fn full(n: usize) -> OperatorAlgebra {
        let mut g = Vec::new();
        for i in 0..n {
            for j in 0..n {
                g.push(matrix_unit(n, n, i, j));
            }
        }
        generate_algebra(&g, n, tol()).unwrap()
    }

    fn diag2() -> OperatorAlgebra {
        generate_algebra(&[matrix_unit(2, 2, 0, 0)], 2, tol()).unwrap()
    }

    fn realize(b: &OperatorAlgebra, gram: Vec<Vec<CMat>>) -> ConcreteModule {
        let am = AbstractModule::new(b.clone(), gram, tol()).unwrap();
        let t = tensor_with_g(&am, tol()).unwrap();
        module_span_closure(&t.l, t.dim_h, b, tol()).unwrap()
    }

    #[test]
    fn lifting_of_b_over_itself_is_identity_rep() {
        let b = diag2();
        let e = module_span_closure(&[identity(2)], 2, &b, tol()).unwrap();
        let bp = commutant(&b, tol()).unwrap();
        let rho = commutant_lifting(&bp, &e, tol()).unwrap();
        for (x, img) in bp.basis().iter().zip(rho.images()) {
            assert!(frobenius(&(x - img)) < 1e-12);
        }
        let h = rho.homomorphism_residuals().unwrap();
        assert!(h.worst() < 1e-12);
        assert!(frobenius(&(rho.apply(&identity(2)).unwrap() - identity(2))) < 1e-12);
    }

    #[test]
    fn lifting_on_one_dimensional_h() {
        // gram [diag(1,0)] over the diagonal algebra: H = C, ρ'(diag(c,d)) = c.
        let b = diag2();
        let e = realize(&b, vec![vec![from_real(2, 2, &[1.0, 0.0, 0.0, 0.0])]]);
        assert_eq!(e.dim_h(), 1);
        let bp = commutant(&b, tol()).unwrap();
        let rho = commutant_lifting(&bp, &e, tol()).unwrap();
        let x = from_real(2, 2, &[3.0, 0.0, 0.0, -7.0]);
        let img = rho.apply(&x).unwrap();
        assert!((img[(0, 0)] - C64::new(3.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn lifting_rejects_non_total_modules() {
        // E = span{e_11} inside B(C^2, C^2) over the diagonal algebra does
        // not span H = C^2.
        let b = diag2();
        let e = module_span_closure(&[matrix_unit(2, 2, 0, 0)], 2, &b, tol()).unwrap();
        let bp = commutant(&b, tol()).unwrap();
        assert!(matches!(
            commutant_lifting(&bp, &e, tol()),
            Err(Error::NotWellDefined(_))
        ));
    }

    #[test]
    fn center_examples() {
        // B = M_2: B' = scalars, ρ' scalar, center is all of B(G, H).
        let b = full(2);
        let e = realize(&b, vec![vec![identity(2), CMat::zeros(2, 2)], vec![CMat::zeros(2, 2), identity(2)]]);
        let bp = commutant(&b, tol()).unwrap();
        let rho = commutant_lifting(&bp, &e, tol()).unwrap();
        let c = center_intertwiners(&b, &rho, tol()).unwrap();
        assert_eq!(c.dim(), 2 * e.dim_h());

        // B = scalars on C^3, E = B: B' = M_3, center = span{I}.
        let s = generate_algebra(&[], 3, tol()).unwrap();
        let e = module_span_closure(&[identity(3)], 3, &s, tol()).unwrap();
        let bp = commutant(&s, tol()).unwrap();
        let rho = commutant_lifting(&bp, &e, tol()).unwrap();
        let c = center_intertwiners(&s, &rho, tol()).unwrap();
        assert_eq!(c.dim(), 1);
        assert!(c.contains(&identity(3), tol()).unwrap());
    }

    #[test]
    fn adjointable_examples() {
        let b = full(2);
        let e = module_span_closure(&[identity(2)], 2, &b, tol()).unwrap();
        let bp = commutant(&b, tol()).unwrap();
        let rho = commutant_lifting(&bp, &e, tol()).unwrap();
        let ba = adjointable_algebra(&e, &rho, tol()).unwrap();
        assert_eq!(ba.direct.dim(), 4);
        assert!(ba.compare(tol()).unwrap().equal);

        let s = generate_algebra(&[], 2, tol()).unwrap();
        let e = module_span_closure(&[identity(2)], 2, &s, tol()).unwrap();
        let bp = commutant(&s, tol()).unwrap();
        let rho = commutant_lifting(&bp, &e, tol()).unwrap();
        let ba = adjointable_algebra(&e, &rho, tol()).unwrap();
        assert_eq!(ba.direct.dim(), 1);
        assert!(ba.compare(tol()).unwrap().equal);
    }

    #[test]
    fn linking_algebra_of_full_corners() {
        let b = full(2);
        let e = realize(&b, vec![vec![identity(2), CMat::zeros(2, 2)], vec![CMat::zeros(2, 2), identity(2)]]);
        let bp = commutant(&b, tol()).unwrap();
        let rho = commutant_lifting(&bp, &e, tol()).unwrap();
        let ba = adjointable_algebra(&e, &rho, tol()).unwrap();
        let lk = build_linking_algebra(&b, &e, &ba.direct, tol()).unwrap();
        assert_eq!(lk.algebra.dim(), 36);
        assert_eq!(lk.algebra.dim(), b.dim() + 2 * e.dim() + ba.direct.dim());
        let r = check_linking_commutant(&lk, &rho, tol()).unwrap();
        assert!(r.holds());
        assert_eq!(r.dim_commutant, 1);
    }

    #[test]
    fn linking_algebra_of_diagonal_instance() {
        // Brute-force oracle: the commutant of M via the plain kron system
        // over all of M's basis.
        let b = diag2();
        let e = realize(&b, vec![vec![from_real(2, 2, &[1.0, 0.0, 0.0, 2.0])]]);
        let bp = commutant(&b, tol()).unwrap();
        let rho = commutant_lifting(&bp, &e, tol()).unwrap();
        let ba = adjointable_algebra(&e, &rho, tol()).unwrap();
        let lk = build_linking_algebra(&b, &e, &ba.direct, tol()).unwrap();
        let total = lk.dim_g + lk.dim_h;
        let id = identity(total);
        let mut rows = Vec::new();
        for x in lk.algebra.basis() {
            rows.push(kron(&x.transpose(), &id) - kron(&id, &x));
        }
        let mut sys = CMat::zeros(rows.len() * total * total, total * total);
        for (i, r) in rows.iter().enumerate() {
            sys.view_mut((i * total * total, 0), r.shape()).copy_from(r);
        }
        let brute = OpSpace::from_orthonormal_columns(total, total, nullspace(&sys, tol()).unwrap());
        assert_eq!(brute.dim(), 2);
        let r = check_linking_commutant(&lk, &rho, tol()).unwrap();
        assert!(r.holds());
        let fast = commutant_space(total, &lk.algebra.star_generators(tol()), tol()).unwrap();
        assert!(fast.projector_distance(&brute).unwrap() < 1e-10);

        let c = center_intertwiners(&b, &rho, tol()).unwrap();
        let bi = check_linking_bicommutant(&lk, &c, tol()).unwrap();
        assert!(bi.holds());
    }

    #[test]
    fn degenerate_linking_algebra() {
        // B = span{I}, E = {0}, Ba = span{I}: two corner identities.
        let s = generate_algebra(&[], 1, tol()).unwrap();
        let e = module_span_closure(&[CMat::zeros(1, 1)], 1, &s, tol()).unwrap();
        assert_eq!(e.dim(), 0);
        let lk = build_linking_algebra(&s, &e, &s, tol()).unwrap();
        assert_eq!(lk.algebra.dim(), 2);
    }

    #[test]
    fn linking_rejects_inconsistent_blocks() {
        // Ba too small: the scalars on H cannot absorb E E*.
        let b = full(2);
        let e = module_span_closure(&[identity(2)], 2, &b, tol()).unwrap();
        let s = generate_algebra(&[], 2, tol()).unwrap();
        assert!(matches!(
            build_linking_algebra(&b, &e, &s, tol()),
            Err(Error::InconsistentInputs(_))
        ));
    }
}
