//! Library results against independently computed answers.

use nalgebra::DVector;

use vnlab_core::algebra::{commutant, generate_algebra};
use vnlab_core::hilbmod::{apply_choi, b_inner, choi_from_kraus, gns_module, tensor_with_g};
use vnlab_core::instances::{generate, random_algebra_generators, InstanceSpec};
use vnlab_core::linops::{
    frobenius, identity, kron, matrix_unit, range_basis, vectorize, CMat, OpSpace, C64,
};
use vnlab_core::rng::SeededStream;
use vnlab_core::selfdual::{build_l_phi, norm_check, riesz_representative, Functional};
use vnlab_core::Tolerance;

fn tol() -> Tolerance {
    Tolerance::default()
}

/// Least squares through the normal equations and an LU solve, sharing no
/// code with the library's SVD-based routines.
fn lstsq(a: &CMat, b: &DVector<C64>) -> DVector<C64> {
    let ata = a.adjoint() * a;
    let atb = a.adjoint() * b;
    ata.lu().solve(&atb).expect("normal equations are nonsingular")
}

#[test]
fn rank_deficient_ranges_are_exact() {
    // Two conjugated complementary projections minus their traces span one
    // direction; this used to come back with a spurious second one.
    let spec = InstanceSpec::new(1, vec![(1, 1), (1, 2)], 1);
    let g = random_algebra_generators(&spec);
    let unit = identity(3) * C64::new(1.0 / 3f64.sqrt(), 0.0);
    let cols: Vec<DVector<C64>> = g
        .iter()
        .map(|x| {
            let v = vectorize(x);
            let u = vectorize(&unit);
            &v - &u * u.dotc(&v)
        })
        .collect();
    let r = CMat::from_columns(&cols);
    let q = range_basis(&r, tol());
    assert_eq!(q.ncols(), 1);
    assert!(frobenius(&(&q * (q.adjoint() * &r) - &r)) < 1e-12);
}

#[test]
fn choi_application_matches_kraus_sum() {
    let mut s = SeededStream::new(3, 0);
    let kraus: Vec<CMat> = (0..3).map(|_| s.complex_matrix(3, 3)).collect();
    let choi = choi_from_kraus(&kraus, 3);
    let x = s.complex_matrix(3, 3);
    let direct = kraus
        .iter()
        .fold(CMat::zeros(3, 3), |acc, k| acc + k * &x * k.adjoint());
    assert!(frobenius(&(apply_choi(&choi, &x) - direct)) < 1e-12);
}

#[test]
fn commutant_matches_kron_nullspace_dimension() {
    // dim{X : gX = Xg for all g} = n² − rank of the stacked kron system,
    // with the rank read off an LU-free eigen count of the Gram matrix.
    let spec = InstanceSpec::new(4, vec![(2, 1), (1, 2)], 1);
    let g = random_algebra_generators(&spec);
    let n = spec.ambient_dim();
    let b = generate_algebra(&g, n, tol()).unwrap();
    let id = identity(n);
    let mut stacked = CMat::zeros(0, n * n);
    for x in g.iter().chain(g.iter().map(|x| x.adjoint()).collect::<Vec<_>>().iter()) {
        let block = kron(&id, x) - kron(&x.transpose(), &id);
        let rows = stacked.nrows();
        stacked = stacked.insert_rows(rows, block.nrows(), C64::new(0.0, 0.0));
        stacked.rows_mut(rows, block.nrows()).copy_from(&block);
    }
    let gram = stacked.adjoint() * &stacked;
    let eig = nalgebra::SymmetricEigen::new(gram);
    let kernel = eig.eigenvalues.iter().filter(|&&l| l.abs() < 1e-9).count();
    assert_eq!(kernel, commutant(&b, tol()).unwrap().dim());
    assert_eq!(kernel, spec.commutant_dim());
}

#[test]
fn riesz_matches_coordinate_solve() {
    for seed in 0..6 {
        let spec = InstanceSpec::new(seed, vec![(2, 1), (1, 1)], 2);
        let r = generate(&spec, tol()).unwrap().realize(tol()).unwrap();
        let e = &r.module;
        let f = r.functional(2).unwrap();
        // y = Σ c_l e_l with y* L_i = v_i, i.e. Σ conj(c_l) e_l* L_i = v_i.
        let basis = e.basis();
        let mut a = CMat::zeros(0, basis.len());
        let mut rhs = Vec::new();
        for (l_i, v_i) in e.generators().iter().zip(f.values()) {
            let cols: Vec<DVector<C64>> =
                basis.iter().map(|el| vectorize(&b_inner(el, l_i))).collect();
            let block = CMat::from_columns(&cols);
            let rows = a.nrows();
            a = a.insert_rows(rows, block.nrows(), C64::new(0.0, 0.0));
            a.rows_mut(rows, block.nrows()).copy_from(&block);
            rhs.extend(vectorize(v_i).iter().copied());
        }
        let d = lstsq(&a, &DVector::from_vec(rhs));
        let y_oracle = basis
            .iter()
            .zip(d.iter())
            .fold(CMat::zeros(e.dim_h(), e.dim_g()), |acc, (el, c)| acc + el * c.conj());
        let y = riesz_representative(&f, tol()).unwrap().y;
        assert!(frobenius(&(y - y_oracle)) < 1e-9, "seed {seed}");
    }
}

#[test]
fn gns_of_identity_map_is_the_algebra_itself() {
    let mut gens = Vec::new();
    for i in 0..2 {
        for j in 0..2 {
            gens.push(matrix_unit(2, 2, i, j));
        }
    }
    let b = generate_algebra(&gens, 2, tol()).unwrap();
    let m = gns_module(&b, &choi_from_kraus(&[identity(2)], 2), tol()).unwrap();
    let t = tensor_with_g(&m, tol()).unwrap();
    assert_eq!(t.dim_h, 2);
    let l1 = &t.l[0];
    assert!(frobenius(&(l1.adjoint() * l1 - identity(2))) < 1e-12);
    assert!(frobenius(&(l1 * l1.adjoint() - identity(2))) < 1e-12);
}

#[test]
fn scalar_module_norm_is_euclidean() {
    // B = C on C¹: the module is C^d with functional x ↦ <w, x>.
    let b = generate_algebra(&[], 1, tol()).unwrap();
    let d = 3;
    let gram: Vec<Vec<CMat>> = (0..d)
        .map(|i| (0..d).map(|j| CMat::from_element(1, 1, C64::new(f64::from(u8::from(i == j)), 0.0))).collect())
        .collect();
    let m = vnlab_core::hilbmod::AbstractModule::new(b.clone(), gram, tol()).unwrap();
    let t = tensor_with_g(&m, tol()).unwrap();
    let e = vnlab_core::hilbmod::module_span_closure(&t.l, t.dim_h, &b, tol()).unwrap();
    let w = [C64::new(1.0, 2.0), C64::new(-0.5, 0.0), C64::new(0.0, 3.0)];
    let values = w.iter().map(|c| CMat::from_element(1, 1, *c)).collect();
    let f = Functional::new(&e, values).unwrap();
    let euclid = w.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    let report = norm_check(&f, 100, 9, tol()).unwrap();
    assert!((report.opnorm - euclid).abs() < 1e-12);
    assert!((report.riesz_norm - euclid).abs() < 1e-12);
    assert!(report.sampled_lower_bound <= euclid + 1e-12);
    let l = build_l_phi(&f, tol()).unwrap();
    assert_eq!(l.op.shape(), (1, d));
}

#[test]
fn module_operators_span_matches_translates() {
    let spec = InstanceSpec::new(8, vec![(1, 1), (1, 1)], 2);
    let r = generate(&spec, tol()).unwrap().realize(tol()).unwrap();
    let translates: Vec<CMat> = r
        .tensor
        .l
        .iter()
        .flat_map(|l| r.algebra.basis().into_iter().map(move |b| l * b))
        .collect();
    let oracle = OpSpace::from_spanning(r.tensor.dim_h, 2, &translates, tol()).unwrap();
    assert_eq!(oracle.dim(), r.module.dim());
}
