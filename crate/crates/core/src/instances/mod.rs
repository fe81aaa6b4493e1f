//! Seeded test instances and their on-disk format.
//!
//! Block algebras `⊕ M_{n_i} ⊗ 1_{m_i}` are conjugated by a random unitary;
//! modules come either from a random Gram matrix or from the GNS
//! construction of a random completely positive map. All randomness goes
//! through [`crate::rng::SeededStream`], one substream per ingredient.

mod format;

pub use format::{fingerprint, max_difference, to_json_bytes, Instance, ModuleData, Realized};

use crate::algebra::{generate_algebra, OperatorAlgebra};
use crate::error::{Error, Result};
use crate::hilbmod::{b_inner, choi_from_kraus, AbstractModule, ConcreteModule};
use crate::linops::{identity, kron, matrix_unit, CMat, Tolerance, C64};
use crate::rng::{stream, SeededStream};
use crate::selfdual::Functional;

pub const DEFAULT_DIM_CAP: usize = 8;
pub const MAX_K: usize = 4;

/// Where the module of an instance comes from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModuleSource {
    /// Random Gram matrix with `k` generators.
    Gram,
    /// GNS module of a random CP map with this many Kraus operators.
    Gns { cp_rank: usize },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InstanceSpec {
    pub seed: u64,
    /// `(n_i, m_i)` for the summand `M_{n_i} ⊗ 1_{m_i}`.
    pub blocks: Vec<(usize, usize)>,
    pub k: usize,
    pub functional_count: usize,
    pub source: ModuleSource,
}

impl InstanceSpec {
    pub fn new(seed: u64, blocks: Vec<(usize, usize)>, k: usize) -> Self {
        InstanceSpec {
            seed,
            blocks,
            k,
            functional_count: 3,
            source: ModuleSource::Gram,
        }
    }

    pub fn ambient_dim(&self) -> usize {
        self.blocks.iter().map(|(n, m)| n * m).sum()
    }

    /// Dimension of the commutant, `Σ m_i²`.
    pub fn commutant_dim(&self) -> usize {
        self.blocks.iter().map(|(_, m)| m * m).sum()
    }

    pub fn validate(&self, dim_cap: usize) -> Result<()> {
        if self.blocks.is_empty() || self.blocks.iter().any(|&(n, m)| n == 0 || m == 0) {
            return Err(Error::validation("blocks", "every block needs n, m >= 1"));
        }
        let dim = self.ambient_dim();
        if dim > dim_cap {
            return Err(Error::validation(
                "ambient dimension",
                format!("blocks give dimension {dim}, cap is {dim_cap}"),
            ));
        }
        if self.k == 0 || self.k > MAX_K {
            return Err(Error::validation("k", format!("k = {} outside 1..={MAX_K}", self.k)));
        }
        if let ModuleSource::Gns { cp_rank } = self.source {
            if cp_rank == 0 {
                return Err(Error::validation("cp rank", "need at least one Kraus operator"));
            }
        }
        Ok(())
    }
}

/// Parses block lists like `2x1,1x2`.
pub fn parse_blocks(s: &str) -> Result<Vec<(usize, usize)>> {
    s.split(',')
        .map(|part| {
            let (n, m) = part
                .trim()
                .split_once('x')
                .ok_or_else(|| Error::invalid(format!("block `{part}` is not of the form NxM")))?;
            let parse = |t: &str| {
                t.trim()
                    .parse::<usize>()
                    .map_err(|_| Error::invalid(format!("block `{part}` is not of the form NxM")))
            };
            Ok((parse(n)?, parse(m)?))
        })
        .collect()
}

/// Generators of `⊕ M_{n_i} ⊗ 1_{m_i}` in standard position: the block
/// projections and `e_{j,j+1} ⊗ 1_{m_i}` inside each block.
pub fn block_generators(blocks: &[(usize, usize)]) -> Vec<CMat> {
    let dim: usize = blocks.iter().map(|(n, m)| n * m).sum();
    let mut gens = Vec::new();
    let mut offset = 0;
    for &(n, m) in blocks {
        let size = n * m;
        let mut p = CMat::zeros(dim, dim);
        p.view_mut((offset, offset), (size, size)).copy_from(&identity(size));
        gens.push(p);
        for j in 0..n.saturating_sub(1) {
            let mut g = CMat::zeros(dim, dim);
            let local = kron(&matrix_unit(n, n, j, j + 1), &identity(m));
            g.view_mut((offset, offset), (size, size)).copy_from(&local);
            gens.push(g);
        }
        offset += size;
    }
    gens
}

/// Haar-distributed unitary: QR of a complex Gaussian matrix with the
/// diagonal of `R` rotated to be positive.
pub fn random_unitary(n: usize, stream: &mut SeededStream) -> CMat {
    let z = stream.complex_matrix(n, n);
    let (mut q, r) = z.qr().unpack();
    for j in 0..n {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { C64::new(1.0, 0.0) };
        let mut col = q.column_mut(j);
        col *= phase;
    }
    q
}

/// Conjugated block generators for `spec`.
pub fn random_algebra_generators(spec: &InstanceSpec) -> Vec<CMat> {
    let mut s = SeededStream::new(spec.seed, stream::ALGEBRA);
    let u = random_unitary(spec.ambient_dim(), &mut s);
    block_generators(&spec.blocks)
        .iter()
        .map(|g| &u * g * u.adjoint())
        .collect()
}

pub fn random_algebra(spec: &InstanceSpec, tol: Tolerance) -> Result<OperatorAlgebra> {
    spec.validate(usize::MAX)?;
    generate_algebra(&random_algebra_generators(spec), spec.ambient_dim(), tol)
}

/// A random element of `span(B)` with complex normal coordinates.
fn random_element(b: &OperatorAlgebra, s: &mut SeededStream) -> CMat {
    let coeffs = s.complex_vec(b.dim());
    b.space().combine(&coeffs)
}

/// Gram data `G_ij = Σ_t r_ti* r_tj` for `k + 1` random draws per generator.
pub fn random_gram(b: &OperatorAlgebra, k: usize, seed: u64) -> Vec<Vec<CMat>> {
    let mut s = SeededStream::new(seed, stream::MODULE);
    let draws: Vec<Vec<CMat>> = (0..=k)
        .map(|_| (0..k).map(|_| random_element(b, &mut s)).collect())
        .collect();
    (0..k)
        .map(|i| {
            (0..k)
                .map(|j| {
                    let n = b.ambient_dim();
                    draws
                        .iter()
                        .fold(CMat::zeros(n, n), |acc, r| acc + b_inner(&r[i], &r[j]))
                })
                .collect()
        })
        .collect()
}

pub fn random_module(
    b: &OperatorAlgebra,
    k: usize,
    seed: u64,
    tol: Tolerance,
) -> Result<AbstractModule> {
    AbstractModule::new(b.clone(), random_gram(b, k, seed), tol)
}

/// Choi matrix of `x ↦ Σ K_s x K_s*` with complex Gaussian Kraus operators.
pub fn random_cp_map(n: usize, rank: usize, seed: u64) -> CMat {
    let mut s = SeededStream::new(seed, stream::CP_MAP);
    let kraus: Vec<CMat> = (0..rank).map(|_| s.complex_matrix(n, n)).collect();
    choi_from_kraus(&kraus, n)
}

/// Like [`random_cp_map`] but with Kraus operators drawn from `span(B)`, so
/// the map sends `B` into itself.
pub fn random_cp_map_in(b: &OperatorAlgebra, rank: usize, seed: u64) -> CMat {
    let mut s = SeededStream::new(seed, stream::CP_MAP);
    let kraus: Vec<CMat> = (0..rank).map(|_| random_element(b, &mut s)).collect();
    choi_from_kraus(&kraus, b.ambient_dim())
}

/// `⟨y₀, •⟩` for a random `y₀` in the module; returns `y₀` as well.
pub fn random_functional(e: &ConcreteModule, seed: u64) -> Result<(Functional<'_>, CMat)> {
    random_functional_on_stream(e, seed, stream::FUNCTIONAL_BASE)
}

fn random_functional_on_stream(
    e: &ConcreteModule,
    seed: u64,
    stream_id: u64,
) -> Result<(Functional<'_>, CMat)> {
    let mut s = SeededStream::new(seed, stream_id);
    let coeffs = s.complex_vec(e.dim());
    let y0 = e.space().combine(&coeffs);
    Ok((Functional::represented_by(e, &y0)?, y0))
}

/// Generates a complete instance: the algebra, module data and
/// `spec.functional_count` functionals. The first functional is `⟨x_1, •⟩`,
/// the second is zero and the rest are random.
pub fn generate(spec: &InstanceSpec, tol: Tolerance) -> Result<Instance> {
    spec.validate(DEFAULT_DIM_CAP)?;
    let n = spec.ambient_dim();
    let generators = random_algebra_generators(spec);
    let b = generate_algebra(&generators, n, tol)?;
    let module = match spec.source {
        ModuleSource::Gram => ModuleData::Gram(random_gram(&b, spec.k, spec.seed)),
        ModuleSource::Gns { cp_rank } => ModuleData::Gns {
            choi: random_cp_map_in(&b, cp_rank, spec.seed),
        },
    };
    let mut instance = Instance {
        dim_g: n,
        algebra_generators: generators,
        module,
        functionals: Vec::new(),
        seed: Some(spec.seed),
        spec: Some(spec.clone()),
    };
    let realized = instance.realize_structure(tol)?;
    let e = &realized.module;
    let mut functionals = Vec::with_capacity(spec.functional_count);
    for i in 0..spec.functional_count {
        let values = match i {
            0 => Functional::represented_by(e, &e.generators()[0])?.values().to_vec(),
            1 => Functional::zero(e).values().to_vec(),
            _ => {
                let id = stream::FUNCTIONAL_BASE + i as u64;
                random_functional_on_stream(e, spec.seed, id)?.0.values().to_vec()
            }
        };
        functionals.push(values);
    }
    instance.functionals = functionals;
    Ok(instance)
}
