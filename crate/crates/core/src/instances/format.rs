//! Instance files.
//!
//! JSON with complex scalars as `[re, im]` and matrices as row-major arrays
//! of rows. Every float is written with 17 significant digits, which
//! round-trips `f64` exactly. Reports use the same writer.

use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{InstanceSpec, ModuleSource};
use crate::algebra::{generate_algebra, OperatorAlgebra};
use crate::error::{Error, Result};
use crate::hilbmod::{
    gns_module, module_span_closure, tensor_with_g, AbstractModule, ConcreteModule, TensorProduct,
};
use crate::linops::{frobenius, CMat, Tolerance, C64};
use crate::selfdual::{validate_functional, Functional};

#[derive(Clone, Debug, PartialEq)]
pub enum ModuleData {
    Gram(Vec<Vec<CMat>>),
    Gns { choi: CMat },
}

/// The contents of an instance file, before any algebra is computed.
#[derive(Clone, Debug, PartialEq)]
pub struct Instance {
    pub dim_g: usize,
    pub algebra_generators: Vec<CMat>,
    pub module: ModuleData,
    /// Values on the module generators, one list per functional.
    pub functionals: Vec<Vec<CMat>>,
    pub seed: Option<u64>,
    pub spec: Option<InstanceSpec>,
}

/// An instance with its algebra, module and tensor product computed and all
/// invariants checked.
#[derive(Clone, Debug)]
pub struct Realized {
    pub algebra: OperatorAlgebra,
    pub abstract_module: AbstractModule,
    pub tensor: TensorProduct,
    pub module: ConcreteModule,
    functionals: Vec<Vec<CMat>>,
}

impl Realized {
    pub fn functional_count(&self) -> usize {
        self.functionals.len()
    }

    pub fn functional(&self, i: usize) -> Result<Functional<'_>> {
        let values = self
            .functionals
            .get(i)
            .ok_or_else(|| Error::invalid(format!("no functional {i}")))?;
        Functional::new(&self.module, values.clone())
    }
}

impl Instance {
    /// Builds the algebra, abstract module, `H = E ⊙ G` and the concrete
    /// module. Functionals are not looked at.
    pub fn realize_structure(&self, tol: Tolerance) -> Result<Realized> {
        let algebra = generate_algebra(&self.algebra_generators, self.dim_g, tol)?;
        let abstract_module = match &self.module {
            ModuleData::Gram(gram) => AbstractModule::new(algebra.clone(), gram.clone(), tol)?,
            ModuleData::Gns { choi } => gns_module(&algebra, choi, tol)?,
        };
        let tensor = tensor_with_g(&abstract_module, tol)?;
        let module = module_span_closure(&tensor.l, tensor.dim_h, &algebra, tol)?;
        Ok(Realized {
            algebra,
            abstract_module,
            tensor,
            module,
            functionals: Vec::new(),
        })
    }

    /// [`Instance::realize_structure`] plus validation of every functional.
    pub fn realize(&self, tol: Tolerance) -> Result<Realized> {
        let mut realized = self.realize_structure(tol)?;
        let k = realized.abstract_module.k();
        for (i, values) in self.functionals.iter().enumerate() {
            if values.len() != k {
                return Err(Error::validation(
                    "functional arity",
                    format!("functional {i} has {} values for {k} generators", values.len()),
                ));
            }
            let f = Functional::new(&realized.module, values.clone())?;
            let v = validate_functional(&f, tol)?;
            if !v.valid {
                return Err(Error::InvalidFunctional {
                    residual: v.worst_residual,
                    allowed: v.allowed,
                });
            }
        }
        realized.functionals = self.functionals.clone();
        Ok(realized)
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let repr: FileRepr = serde_json::from_str(text).map_err(parse_error)?;
        repr.into_instance()
    }

    /// Reads and parses a file without computing anything.
    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Instance::from_json_str(&std::fs::read_to_string(path)?)
    }

    /// Reads a file and re-validates every invariant.
    pub fn load(path: impl AsRef<Path>, tol: Tolerance) -> Result<(Self, Realized)> {
        let instance = Instance::read(path)?;
        let realized = instance.realize(tol)?;
        Ok((instance, realized))
    }

    pub fn to_canonical_bytes(&self) -> Vec<u8> {
        let mut out = to_json_bytes(&FileRepr::from_instance(self));
        out.push(b'\n');
        out
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_canonical_bytes())?;
        Ok(())
    }
}

/// Hex SHA-256 of the canonical serialization.
pub fn fingerprint(instance: &Instance) -> String {
    Sha256::digest(instance.to_canonical_bytes())
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

struct SignificantDigits;

impl serde_json::ser::Formatter for SignificantDigits {
    fn write_f64<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        write!(writer, "{value:.16e}")
    }
}

/// Compact JSON with every float at 17 significant digits.
pub fn to_json_bytes<T: Serialize>(value: &T) -> Vec<u8> {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, SignificantDigits);
    value
        .serialize(&mut ser)
        .expect("serializing to memory cannot fail");
    out
}

fn parse_error(e: serde_json::Error) -> Error {
    Error::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    }
}

type MatrixRepr = Vec<Vec<[f64; 2]>>;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileRepr {
    #[serde(rename = "dim_G")]
    dim_g: usize,
    algebra_generators: Vec<MatrixRepr>,
    module: ModuleRepr,
    #[serde(default)]
    functionals: Vec<FunctionalRepr>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    spec: Option<SpecRepr>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModuleRepr {
    #[serde(rename = "type", default, skip_serializing_if = "Option::is_none")]
    kind: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    k: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    gram: Option<Vec<Vec<MatrixRepr>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    choi: Option<MatrixRepr>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FunctionalRepr {
    values: Vec<MatrixRepr>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SpecRepr {
    seed: u64,
    blocks: Vec<[usize; 2]>,
    k: usize,
    functional_count: usize,
    #[serde(default = "gram_source")]
    source: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    cp_rank: Option<usize>,
}

fn gram_source() -> String {
    "gram".into()
}

fn matrix_to_repr(m: &CMat) -> MatrixRepr {
    (0..m.nrows())
        .map(|r| (0..m.ncols()).map(|c| [m[(r, c)].re, m[(r, c)].im]).collect())
        .collect()
}

fn matrix_from_repr(rows: &MatrixRepr, shape: (usize, usize), what: &str) -> Result<CMat> {
    let bad = |detail: String| Error::validation("matrix shape", format!("{what}: {detail}"));
    if rows.len() != shape.0 {
        return Err(bad(format!("{} rows, expected {}", rows.len(), shape.0)));
    }
    let mut m = CMat::zeros(shape.0, shape.1);
    for (r, row) in rows.iter().enumerate() {
        if row.len() != shape.1 {
            return Err(bad(format!("row {r} has {} entries, expected {}", row.len(), shape.1)));
        }
        for (c, z) in row.iter().enumerate() {
            m[(r, c)] = C64::new(z[0], z[1]);
        }
    }
    Ok(m)
}

impl FileRepr {
    fn from_instance(inst: &Instance) -> Self {
        let module = match &inst.module {
            ModuleData::Gram(gram) => ModuleRepr {
                kind: None,
                k: Some(gram.len()),
                gram: Some(
                    gram.iter()
                        .map(|row| row.iter().map(matrix_to_repr).collect())
                        .collect(),
                ),
                choi: None,
            },
            ModuleData::Gns { choi } => ModuleRepr {
                kind: Some("gns".into()),
                k: None,
                gram: None,
                choi: Some(matrix_to_repr(choi)),
            },
        };
        FileRepr {
            dim_g: inst.dim_g,
            algebra_generators: inst.algebra_generators.iter().map(matrix_to_repr).collect(),
            module,
            functionals: inst
                .functionals
                .iter()
                .map(|vals| FunctionalRepr {
                    values: vals.iter().map(matrix_to_repr).collect(),
                })
                .collect(),
            seed: inst.seed,
            spec: inst.spec.as_ref().map(|s| SpecRepr {
                seed: s.seed,
                blocks: s.blocks.iter().map(|&(n, m)| [n, m]).collect(),
                k: s.k,
                functional_count: s.functional_count,
                source: match s.source {
                    ModuleSource::Gram => "gram".into(),
                    ModuleSource::Gns { .. } => "gns".into(),
                },
                cp_rank: match s.source {
                    ModuleSource::Gram => None,
                    ModuleSource::Gns { cp_rank } => Some(cp_rank),
                },
            }),
        }
    }

    fn into_instance(self) -> Result<Instance> {
        let n = self.dim_g;
        if n == 0 {
            return Err(Error::validation("dim_G", "ambient dimension must be positive"));
        }
        let algebra_generators = self
            .algebra_generators
            .iter()
            .enumerate()
            .map(|(i, g)| matrix_from_repr(g, (n, n), &format!("algebra generator {i}")))
            .collect::<Result<Vec<_>>>()?;
        let module = match self.module.kind.as_deref() {
            None | Some("gram") => {
                let gram = self
                    .module
                    .gram
                    .ok_or_else(|| Error::validation("module", "gram module without \"gram\""))?;
                if let Some(k) = self.module.k {
                    if k != gram.len() {
                        return Err(Error::validation(
                            "gram shape",
                            format!("k = {k} but gram has {} rows", gram.len()),
                        ));
                    }
                }
                let gram = gram
                    .iter()
                    .enumerate()
                    .map(|(i, row)| {
                        row.iter()
                            .enumerate()
                            .map(|(j, g)| matrix_from_repr(g, (n, n), &format!("gram entry ({i},{j})")))
                            .collect::<Result<Vec<_>>>()
                    })
                    .collect::<Result<Vec<_>>>()?;
                ModuleData::Gram(gram)
            }
            Some("gns") => {
                let choi = self
                    .module
                    .choi
                    .ok_or_else(|| Error::validation("module", "gns module without \"choi\""))?;
                ModuleData::Gns {
                    choi: matrix_from_repr(&choi, (n * n, n * n), "choi")?,
                }
            }
            Some(other) => {
                return Err(Error::validation("module", format!("unknown module type `{other}`")))
            }
        };
        let functionals = self
            .functionals
            .iter()
            .enumerate()
            .map(|(i, f)| {
                f.values
                    .iter()
                    .enumerate()
                    .map(|(j, v)| matrix_from_repr(v, (n, n), &format!("functional {i} value {j}")))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        let spec = match self.spec {
            None => None,
            Some(s) => {
                let source = match (s.source.as_str(), s.cp_rank) {
                    ("gram", _) => ModuleSource::Gram,
                    ("gns", Some(cp_rank)) => ModuleSource::Gns { cp_rank },
                    ("gns", None) => {
                        return Err(Error::validation("spec", "gns source without cp_rank"))
                    }
                    (other, _) => {
                        return Err(Error::validation("spec", format!("unknown source `{other}`")))
                    }
                };
                Some(InstanceSpec {
                    seed: s.seed,
                    blocks: s.blocks.iter().map(|b| (b[0], b[1])).collect(),
                    k: s.k,
                    functional_count: s.functional_count,
                    source,
                })
            }
        };
        Ok(Instance {
            dim_g: n,
            algebra_generators,
            module,
            functionals,
            seed: self.seed,
            spec,
        })
    }
}

/// Largest entrywise difference between two instances' matrices, for
/// round-trip checks. `None` if the shapes differ.
pub fn max_difference(a: &Instance, b: &Instance) -> Option<f64> {
    fn flat(i: &Instance) -> Vec<&CMat> {
        let mut v: Vec<&CMat> = i.algebra_generators.iter().collect();
        match &i.module {
            ModuleData::Gram(g) => v.extend(g.iter().flatten()),
            ModuleData::Gns { choi } => v.push(choi),
        }
        v.extend(i.functionals.iter().flatten());
        v
    }
    let (fa, fb) = (flat(a), flat(b));
    if fa.len() != fb.len() || fa.iter().zip(&fb).any(|(x, y)| x.shape() != y.shape()) {
        return None;
    }
    Some(
        fa.iter()
            .zip(&fb)
            .map(|(x, y)| frobenius(&(*x - *y)))
            .fold(0.0, f64::max),
    )
}
