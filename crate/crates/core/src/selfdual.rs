//! `B`-functionals on a concrete module and their Riesz representatives.
//!
//! A right-linear `Φ: E → B` is specified by its values `v_i = Φ(x_i)` on the
//! module generators. Such data defines a functional only if it respects
//! every relation `Σ x_i b_i = 0`. The operator `L_Φ: x ⊙ g ↦ (Φx) g` on
//! `H` is solved from `L_Φ L_i = v_i`, and its adjoint `y = L_Φ*` lies in `E`
//! and represents `Φ` as `⟨y, •⟩`.

use crate::error::{Error, Result};
use crate::hilbmod::{b_inner, hcat, polar_parts, ConcreteModule};
use crate::intertwine::Representation;
use crate::linops::{
    self, frobenius, nullspace, operator_norm, solve_right, unvectorize, CMat, Tolerance, C64,
};
use crate::rng::SeededStream;

/// A right-linear map `E → B` given by its values on the module generators.
#[derive(Clone, Debug)]
pub struct Functional<'m> {
    module: &'m ConcreteModule,
    values: Vec<CMat>,
}

impl<'m> Functional<'m> {
    pub fn new(module: &'m ConcreteModule, values: Vec<CMat>) -> Result<Self> {
        let n = module.dim_g();
        if values.len() != module.generators().len() {
            return Err(Error::invalid(format!(
                "{} values for {} module generators",
                values.len(),
                module.generators().len()
            )));
        }
        for v in &values {
            if v.shape() != (n, n) {
                return Err(Error::invalid(format!(
                    "functional value is {}x{}, expected {n}x{n}",
                    v.nrows(),
                    v.ncols()
                )));
            }
            linops::check_finite(v, "functional value")?;
        }
        Ok(Functional { module, values })
    }

    /// `⟨y, •⟩` for a module element `y`.
    pub fn represented_by(module: &'m ConcreteModule, y: &CMat) -> Result<Self> {
        let values = module.generators().iter().map(|l| b_inner(y, l)).collect();
        Functional::new(module, values)
    }

    pub fn zero(module: &'m ConcreteModule) -> Self {
        let n = module.dim_g();
        Functional {
            module,
            values: vec![CMat::zeros(n, n); module.generators().len()],
        }
    }

    pub fn module(&self) -> &'m ConcreteModule {
        self.module
    }

    pub fn values(&self) -> &[CMat] {
        &self.values
    }

    /// `α Φ + β Ψ`.
    pub fn combine(&self, alpha: C64, other: &Functional<'m>, beta: C64) -> Self {
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a * alpha + b * beta)
            .collect();
        Functional {
            module: self.module,
            values,
        }
    }

    fn scale(&self) -> f64 {
        self.values.iter().map(frobenius).fold(1.0f64, f64::max)
    }

    /// `Φ(Σ L_i b_i) = Σ v_i b_i`, for coefficient tuples in the expansion
    /// basis (see [`expansion_matrix`]).
    fn evaluate_coefficients(&self, coeffs: &[C64]) -> CMat {
        let b_basis = self.module.algebra().basis();
        let n = self.module.dim_g();
        let mut out = CMat::zeros(n, n);
        for (i, v) in self.values.iter().enumerate() {
            for (l, a) in b_basis.iter().enumerate() {
                let c = coeffs[i * b_basis.len() + l];
                if c != C64::new(0.0, 0.0) {
                    out += v * a * c;
                }
            }
        }
        out
    }
}

/// Columns `vec(L_i a_l)` for generators `L_i` and algebra basis elements
/// `a_l`, ordered generator-major. Its image is `E` and its kernel is the
/// relation space of the generators.
fn expansion_matrix(module: &ConcreteModule) -> CMat {
    let b_basis = module.algebra().basis();
    let gens = module.generators();
    let (m, n) = (module.dim_h(), module.dim_g());
    let mut out = CMat::zeros(m * n, gens.len() * b_basis.len());
    for (i, l) in gens.iter().enumerate() {
        for (j, a) in b_basis.iter().enumerate() {
            let t = l * a;
            out.column_mut(i * b_basis.len() + j).copy_from_slice(t.as_slice());
        }
    }
    out
}

#[derive(Clone, Copy, Debug)]
pub struct Validity {
    pub valid: bool,
    /// Largest `|Σ v_i b_i|_F` over a basis of relations `Σ L_i b_i = 0`.
    pub worst_residual: f64,
    pub allowed: f64,
    pub relations: usize,
}

/// Checks that the values are `B`-valued and respect every relation among
/// the generators.
pub fn validate_functional(f: &Functional<'_>, tol: Tolerance) -> Result<Validity> {
    let algebra = f.module.algebra();
    for v in &f.values {
        let r = algebra.space().residual(v)?;
        let allowed = tol.cutoff(frobenius(v).max(1.0));
        if r > allowed {
            return Err(Error::NotBValued { residual: r, allowed });
        }
    }
    let a = expansion_matrix(f.module);
    if a.ncols() == 0 {
        return Ok(Validity {
            valid: true,
            worst_residual: 0.0,
            allowed: tol.cutoff(f.scale()),
            relations: 0,
        });
    }
    let relations = nullspace(&a, tol)?;
    let mut worst = 0.0f64;
    for c in relations.column_iter() {
        let image = f.evaluate_coefficients(c.as_slice());
        worst = worst.max(frobenius(&image));
    }
    let allowed = tol.cutoff(f.scale());
    Ok(Validity {
        valid: worst <= allowed,
        worst_residual: worst,
        allowed,
        relations: relations.ncols(),
    })
}

#[derive(Clone, Debug)]
pub struct LPhi {
    /// `n x m`, an operator `H → G`.
    pub op: CMat,
    pub residual: f64,
}

/// Solves `L_Φ L_i = v_i`. The generator columns span `H`, so the solution
/// is unique when it exists.
pub fn build_l_phi(f: &Functional<'_>, tol: Tolerance) -> Result<LPhi> {
    let m = f.module.dim_h();
    let n = f.module.dim_g();
    let w = hcat(f.module.generators(), m);
    let v = hcat(&f.values, n);
    let (op, residual) = solve_right(&w, &v, tol);
    let allowed = tol.cutoff(f.scale());
    if residual > allowed {
        return Err(Error::InvalidFunctional { residual, allowed });
    }
    Ok(LPhi { op, residual })
}

/// Largest `|L_Φ ρ'(b') − b' L_Φ|` over the basis of `B'`.
pub fn l_phi_intertwining_residual(l_phi: &CMat, rho: &Representation) -> f64 {
    rho.source()
        .basis()
        .iter()
        .zip(rho.images())
        .map(|(b, r)| frobenius(&(l_phi * r - b * l_phi)))
        .fold(0.0, f64::max)
}

#[derive(Clone, Debug)]
pub struct Riesz {
    /// The representative `y = L_Φ*`, with `Φ = ⟨y, •⟩`.
    pub y: CMat,
    /// Distance from `y` to the module.
    pub membership_residual: f64,
    /// Largest `|y* L_i − v_i|_F`.
    pub fidelity_residual: f64,
}

pub fn riesz_representative(f: &Functional<'_>, tol: Tolerance) -> Result<Riesz> {
    let l_phi = build_l_phi(f, tol)?;
    let y = l_phi.op.adjoint();
    let membership_residual = f.module.space().residual(&y)?;
    if !tol.accepts(membership_residual, frobenius(&y).max(1.0)) {
        return Err(Error::InternalInconsistency(format!(
            "representative is {membership_residual:e} away from the module"
        )));
    }
    // d* L_i = 0 for all i forces d = 0 exactly when the generator columns
    // span H.
    let m = f.module.dim_h();
    let total = linops::numerical_rank(&hcat(f.module.generators(), m), tol);
    if total != m {
        return Err(Error::InternalInconsistency(format!(
            "generators span {total} of {m} dimensions; representative not unique"
        )));
    }
    let fidelity_residual = f
        .module
        .generators()
        .iter()
        .zip(&f.values)
        .map(|(l, v)| frobenius(&(b_inner(&y, l) - v)))
        .fold(0.0, f64::max);
    Ok(Riesz {
        y,
        membership_residual,
        fidelity_residual,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NormReport {
    /// `|L_Φ|`.
    pub opnorm: f64,
    /// `|⟨y, y⟩|^{1/2}`.
    pub riesz_norm: f64,
    /// Largest `|Φ x|` over the sampled unit-norm module elements.
    pub sampled_lower_bound: f64,
    /// `|Φ x₀|` for the partial isometry `x₀` in the polar decomposition of
    /// `y`.
    pub polar_witness: f64,
}

/// Compares `|L_Φ|` with `|⟨y,y⟩|^{1/2}` and with lower bounds `|Φ x|` for
/// module elements of norm one.
///
/// Sampled elements are `x = Σ L_i b_i` with complex normal coordinates for
/// the `b_i`, rescaled to operator norm one; zero draws are redrawn. `Φ x` is
/// evaluated from the generator expansion, never through `L_Φ`.
pub fn norm_check(
    f: &Functional<'_>,
    samples: usize,
    seed: u64,
    tol: Tolerance,
) -> Result<NormReport> {
    let riesz = riesz_representative(f, tol)?;
    let opnorm = operator_norm(&riesz.y);
    let riesz_norm = operator_norm(&b_inner(&riesz.y, &riesz.y)).sqrt();

    let (m, n) = (f.module.dim_h(), f.module.dim_g());
    let a = expansion_matrix(f.module);
    let mut stream = SeededStream::new(seed, crate::rng::stream::SAMPLING);
    let mut sampled = 0.0f64;
    if a.ncols() > 0 && m > 0 {
        for _ in 0..samples {
            let mut drawn = None;
            for _ in 0..100 {
                let c = stream.complex_vec(a.ncols());
                let x = &a * nalgebra::DVector::from_column_slice(&c);
                let norm = operator_norm(&unvectorize(x.as_slice(), m, n));
                if norm > 1e-12 {
                    drawn = Some((c, norm));
                    break;
                }
            }
            let Some((c, norm)) = drawn else { break };
            let value = operator_norm(&f.evaluate_coefficients(&c)) / norm;
            sampled = sampled.max(value);
        }
    }

    let polar = polar_parts(&riesz.y, tol)?;
    let polar_witness = if a.ncols() > 0 && operator_norm(&polar.isometry) > 0.5 {
        let coeffs = linops::pseudo_inverse(&a, tol) * linops::vectorize(&polar.isometry);
        operator_norm(&f.evaluate_coefficients(coeffs.as_slice()))
    } else {
        0.0
    };

    Ok(NormReport {
        opnorm,
        riesz_norm,
        sampled_lower_bound: sampled,
        polar_witness,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{commutant, generate_algebra, OperatorAlgebra};
    use crate::hilbmod::{module_span_closure, tensor_with_g, AbstractModule};
    use crate::intertwine::commutant_lifting;
    use crate::linops::{from_real, identity, matrix_unit};

    fn tol() -> Tolerance {
        Tolerance::default()
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
    fn tautological_functional_is_valid_and_represented_by_generator() {
        let b = diag2();
        let g11 = from_real(2, 2, &[2.0, 0.0, 0.0, 1.0]);
        let c = from_real(2, 2, &[1.0, 0.0, 0.0, 3.0]);
        // x_2 = x_1 c.
        let gram = vec![
            vec![g11.clone(), &g11 * &c],
            vec![c.adjoint() * &g11, c.adjoint() * &g11 * &c],
        ];
        let e = realize(&b, gram.clone());
        let f = Functional::new(&e, gram[0].clone()).unwrap();
        assert!(validate_functional(&f, tol()).unwrap().valid);
        let r = riesz_representative(&f, tol()).unwrap();
        assert!(frobenius(&(&r.y - &e.generators()[0])) < 1e-10);
        assert!(r.fidelity_residual < 1e-10);
    }

    #[test]
    fn free_rank_one_module_accepts_anything_in_b() {
        let b = diag2();
        let e = realize(&b, vec![vec![identity(2)]]);
        let f = Functional::new(&e, vec![from_real(2, 2, &[5.0, 0.0, 0.0, -2.0])]).unwrap();
        let v = validate_functional(&f, tol()).unwrap();
        assert!(v.valid);
        assert_eq!(v.relations, 0);
    }

    #[test]
    fn relation_incompatible_values_are_rejected() {
        let b = diag2();
        let g11 = identity(2);
        let c = from_real(2, 2, &[1.0, 0.0, 0.0, 3.0]);
        let gram = vec![
            vec![g11.clone(), c.clone()],
            vec![c.adjoint(), c.adjoint() * &c],
        ];
        let e = realize(&b, gram);
        let v1 = from_real(2, 2, &[1.0, 0.0, 0.0, 1.0]);
        let v2 = from_real(2, 2, &[0.0, 0.0, 0.0, 0.0]);
        let f = Functional::new(&e, vec![v1.clone(), v2.clone()]).unwrap();
        let v = validate_functional(&f, tol()).unwrap();
        assert!(!v.valid);
        // One relation direction per block; the residual is the defect
        // |v_1 c − v_2| seen through unit-norm relation vectors.
        assert!(v.worst_residual > 0.5);
        assert!(v.worst_residual <= frobenius(&(&v1 * &c - &v2)) + 1e-12);
        assert!(matches!(build_l_phi(&f, tol()), Err(Error::InvalidFunctional { .. })));
    }

    #[test]
    fn values_outside_b_are_rejected() {
        let b = diag2();
        let e = realize(&b, vec![vec![identity(2)]]);
        let f = Functional::new(&e, vec![from_real(2, 2, &[0.0, 1.0, 0.0, 0.0])]).unwrap();
        assert!(matches!(validate_functional(&f, tol()), Err(Error::NotBValued { .. })));
    }

    #[test]
    fn l_phi_examples() {
        let b = diag2();
        let e = realize(&b, vec![vec![identity(2)]]);
        let z = Functional::zero(&e);
        assert_eq!(frobenius(&build_l_phi(&z, tol()).unwrap().op), 0.0);

        // E = B over itself, Φ = ⟨1, •⟩: L_Φ = L_1^{-1}... with L_1 unitary,
        // L_Φ L_1 = 1 so L_Φ = L_1*.
        let f = Functional::new(&e, vec![identity(2)]).unwrap();
        let l = build_l_phi(&f, tol()).unwrap();
        assert!(frobenius(&(&l.op * &e.generators()[0] - identity(2))) < 1e-12);

        // Gram [diag(1,0)], v_1 = diag(α, 0): L_Φ = α L_1* on the 1-dim H.
        let e = realize(&b, vec![vec![from_real(2, 2, &[1.0, 0.0, 0.0, 0.0])]]);
        let alpha = C64::new(0.5, -2.0);
        let mut v = CMat::zeros(2, 2);
        v[(0, 0)] = alpha;
        let f = Functional::new(&e, vec![v]).unwrap();
        let l = build_l_phi(&f, tol()).unwrap();
        assert_eq!(l.op.shape(), (2, 1));
        let want = e.generators()[0].adjoint() * alpha;
        assert!(frobenius(&(&l.op - want)) < 1e-12);
    }

    #[test]
    fn l_phi_intertwines_lifting() {
        let b = diag2();
        let e = realize(&b, vec![vec![from_real(2, 2, &[2.0, 0.0, 0.0, 3.0])]]);
        let bp = commutant(&b, tol()).unwrap();
        let rho = commutant_lifting(&bp, &e, tol()).unwrap();
        let y = e.basis()[0].clone() * C64::new(1.0, 1.0);
        let f = Functional::represented_by(&e, &y).unwrap();
        let l = build_l_phi(&f, tol()).unwrap();
        assert!(l_phi_intertwining_residual(&l.op, &rho) < 1e-10);
    }

    #[test]
    fn scalar_riesz_case() {
        // B = C on G = C^1: E is a Hilbert space of columns.
        let b = generate_algebra(&[], 1, tol()).unwrap();
        let one = identity(1);
        let gram = vec![vec![one.clone(), CMat::zeros(1, 1)], vec![CMat::zeros(1, 1), one]];
        let e = realize(&b, gram);
        let vals = vec![from_real(1, 1, &[3.0]), from_real(1, 1, &[4.0])];
        let f = Functional::new(&e, vals).unwrap();
        let r = norm_check(&f, 50, 3, tol()).unwrap();
        assert!((r.opnorm - 5.0).abs() < 1e-12);
        assert!((r.riesz_norm - 5.0).abs() < 1e-12);
        assert!(r.sampled_lower_bound <= 5.0 + 1e-9);
        assert!((r.polar_witness - 5.0).abs() < 1e-10);
    }

    #[test]
    fn zero_functional_norms_vanish() {
        let e = realize(&diag2(), vec![vec![identity(2)]]);
        let r = norm_check(&Functional::zero(&e), 20, 0, tol()).unwrap();
        assert_eq!(r.opnorm, 0.0);
        assert_eq!(r.riesz_norm, 0.0);
        assert_eq!(r.sampled_lower_bound, 0.0);
    }

    #[test]
    fn partial_isometry_functional_has_norm_one() {
        let b = diag2();
        let e = realize(&b, vec![vec![from_real(2, 2, &[4.0, 0.0, 0.0, 1.0])]]);
        let x = polar_parts(&e.generators()[0], tol()).unwrap().isometry;
        assert!(e.contains(&x, tol()).unwrap());
        let f = Functional::represented_by(&e, &x).unwrap();
        let r = norm_check(&f, 100, 11, tol()).unwrap();
        assert!((r.opnorm - 1.0).abs() < 1e-10);
        assert!((r.riesz_norm - 1.0).abs() < 1e-10);
        assert!(r.polar_witness >= 1.0 - 1e-9);
        assert!(r.sampled_lower_bound <= 1.0 + 1e-9);
    }

    #[test]
    fn riesz_is_conjugate_linear() {
        let b = diag2();
        let e = realize(&b, vec![vec![from_real(2, 2, &[2.0, 0.0, 0.0, 1.0])]]);
        let y1 = e.basis()[0].clone();
        let y2 = e.basis()[1].clone() * C64::new(0.0, 2.0);
        let f1 = Functional::represented_by(&e, &y1).unwrap();
        let f2 = Functional::represented_by(&e, &y2).unwrap();
        let (alpha, beta) = (C64::new(1.5, -0.5), C64::new(-2.0, 1.0));
        let r = riesz_representative(&f1.combine(alpha, &f2, beta), tol()).unwrap();
        let want = &y1 * alpha.conj() + &y2 * beta.conj();
        assert!(frobenius(&(r.y - want)) < 1e-10);
    }
}
