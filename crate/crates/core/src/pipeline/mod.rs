//! The verification pipeline.
//!
//! Each verification is a [`Check`] registered by name in a [`Registry`].
//! Checks share a [`Context`] that builds the heavier artifacts (commutant,
//! lifting, intertwiners, adjointable operators, linking algebra) on first
//! use. A check lists the checks it depends on; if one of those failed it is
//! recorded as skipped instead of run, so a broken lifting does not produce a
//! cascade of unrelated-looking failures.

mod checks;

use std::cell::OnceCell;
use std::collections::HashSet;
use std::time::Instant;

use serde::Serialize;

pub use checks::standard_checks;

use crate::algebra::{commutant, OperatorAlgebra};
use crate::error::{Error, Result};
use crate::hilbmod::ConcreteModule;
use crate::instances::Realized;
use crate::intertwine::{
    adjointable_algebra, build_linking_algebra, center_intertwiners, commutant_lifting,
    AdjointableAlgebras, LinkingAlgebra, Representation,
};
use crate::linops::Tolerance;

/// One measured quantity produced by a check.
#[derive(Clone, Debug)]
pub struct Measurement {
    pub name: String,
    pub passed: bool,
    pub residual: f64,
    pub tolerance: f64,
    pub detail: String,
}

impl Measurement {
    /// Passes when `residual <= tolerance`.
    pub fn bounded(name: impl Into<String>, residual: f64, tolerance: f64) -> Self {
        Measurement {
            name: name.into(),
            passed: residual <= tolerance,
            residual,
            tolerance,
            detail: String::new(),
        }
    }

    pub fn with_detail(mut self, detail: impl Into<String>) -> Self {
        self.detail = detail.into();
        self
    }

    pub fn require(mut self, condition: bool) -> Self {
        self.passed &= condition;
        self
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckRecord {
    pub check_name: String,
    pub passed: bool,
    /// Distance or residual; absent when the check did not run.
    pub residual: Option<f64>,
    pub tolerance: Option<f64>,
    pub elapsed_ms: f64,
    pub detail: String,
}

pub trait Check {
    fn name(&self) -> &'static str;
    fn description(&self) -> &'static str;
    /// Checks whose failure makes this one meaningless.
    fn requires(&self) -> &'static [&'static str] {
        &[]
    }
    /// An `Err` is recorded as a failure carrying the message.
    fn run(&self, ctx: &Context<'_>) -> std::result::Result<Vec<Measurement>, String>;
}

/// Checks keyed by name, run in registration order.
#[derive(Default)]
pub struct Registry {
    checks: Vec<Box<dyn Check>>,
}

impl Registry {
    pub fn new() -> Self {
        Registry::default()
    }

    /// Every built-in check, in dependency order.
    pub fn standard() -> Self {
        let mut r = Registry::new();
        for c in standard_checks() {
            r.register(c).expect("built-in check names are unique");
        }
        r
    }

    pub fn register(&mut self, check: Box<dyn Check>) -> Result<()> {
        if self.get(check.name()).is_some() {
            return Err(Error::invalid(format!("check `{}` registered twice", check.name())));
        }
        self.checks.push(check);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&dyn Check> {
        self.checks.iter().find(|c| c.name() == name).map(|c| c.as_ref())
    }

    pub fn iter(&self) -> impl Iterator<Item = &dyn Check> {
        self.checks.iter().map(|c| c.as_ref())
    }

    /// Runs every check, or only those named in `selection` (still in
    /// registration order).
    pub fn run(&self, ctx: &Context<'_>, selection: Option<&[String]>) -> Result<Vec<CheckRecord>> {
        if let Some(names) = selection {
            for n in names {
                if self.get(n).is_none() {
                    return Err(Error::invalid(format!("unknown check `{n}`")));
                }
            }
        }
        let mut failed: HashSet<&'static str> = HashSet::new();
        let mut records = Vec::new();
        for check in self.iter() {
            if let Some(names) = selection {
                if !names.iter().any(|n| n == check.name()) {
                    continue;
                }
            }
            if let Some(dep) = check.requires().iter().find(|d| failed.contains(*d)) {
                failed.insert(check.name());
                records.push(CheckRecord {
                    check_name: check.name().to_string(),
                    passed: false,
                    residual: None,
                    tolerance: None,
                    elapsed_ms: 0.0,
                    detail: format!("skipped: `{dep}` failed"),
                });
                continue;
            }
            let start = Instant::now();
            let outcome = check.run(ctx);
            let elapsed = start.elapsed().as_secs_f64() * 1e3;
            match outcome {
                Ok(ms) if !ms.is_empty() => {
                    let share = elapsed / ms.len() as f64;
                    if ms.iter().any(|m| !m.passed) {
                        failed.insert(check.name());
                    }
                    records.extend(ms.into_iter().map(|m| CheckRecord {
                        check_name: m.name,
                        passed: m.passed,
                        residual: Some(m.residual),
                        tolerance: Some(m.tolerance),
                        elapsed_ms: share,
                        detail: m.detail,
                    }));
                }
                Ok(_) => {}
                Err(msg) => {
                    failed.insert(check.name());
                    records.push(CheckRecord {
                        check_name: check.name().to_string(),
                        passed: false,
                        residual: None,
                        tolerance: None,
                        elapsed_ms: elapsed,
                        detail: msg,
                    });
                }
            }
        }
        Ok(records)
    }
}

/// Shared state for one instance. Artifacts are computed on first request
/// and remembered, errors included.
pub struct Context<'a> {
    pub realized: &'a Realized,
    pub tol: Tolerance,
    pub samples: usize,
    pub seed: u64,
    /// `Σ m_i²` when the instance records its block structure.
    pub expected_commutant_dim: Option<usize>,
    bprime: OnceCell<std::result::Result<OperatorAlgebra, String>>,
    rho: OnceCell<std::result::Result<Representation, String>>,
    center: OnceCell<std::result::Result<ConcreteModule, String>>,
    adjointable: OnceCell<std::result::Result<AdjointableAlgebras, String>>,
    linking: OnceCell<std::result::Result<LinkingAlgebra, String>>,
}

fn cached<'c, T>(
    cell: &'c OnceCell<std::result::Result<T, String>>,
    what: &str,
    f: impl FnOnce() -> std::result::Result<T, String>,
) -> std::result::Result<&'c T, String> {
    cell.get_or_init(f)
        .as_ref()
        .map_err(|e| format!("{what}: {e}"))
}

impl<'a> Context<'a> {
    pub fn new(realized: &'a Realized, tol: Tolerance, samples: usize, seed: u64) -> Self {
        Context {
            realized,
            tol,
            samples,
            seed,
            expected_commutant_dim: None,
            bprime: OnceCell::new(),
            rho: OnceCell::new(),
            center: OnceCell::new(),
            adjointable: OnceCell::new(),
            linking: OnceCell::new(),
        }
    }

    pub fn algebra(&self) -> &OperatorAlgebra {
        &self.realized.algebra
    }

    pub fn module(&self) -> &ConcreteModule {
        &self.realized.module
    }

    pub fn bprime(&self) -> std::result::Result<&OperatorAlgebra, String> {
        cached(&self.bprime, "commutant of B", || {
            commutant(self.algebra(), self.tol).map_err(|e| e.to_string())
        })
    }

    pub fn rho(&self) -> std::result::Result<&Representation, String> {
        cached(&self.rho, "commutant lifting", || {
            let bp = self.bprime()?;
            commutant_lifting(bp, self.module(), self.tol).map_err(|e| e.to_string())
        })
    }

    pub fn center(&self) -> std::result::Result<&ConcreteModule, String> {
        cached(&self.center, "intertwiner space", || {
            center_intertwiners(self.algebra(), self.rho()?, self.tol).map_err(|e| e.to_string())
        })
    }

    pub fn adjointable(&self) -> std::result::Result<&AdjointableAlgebras, String> {
        cached(&self.adjointable, "adjointable operators", || {
            adjointable_algebra(self.module(), self.rho()?, self.tol).map_err(|e| e.to_string())
        })
    }

    pub fn linking(&self) -> std::result::Result<&LinkingAlgebra, String> {
        cached(&self.linking, "linking algebra", || {
            let ba = &self.adjointable()?.direct;
            build_linking_algebra(self.algebra(), self.module(), ba, self.tol)
                .map_err(|e| e.to_string())
        })
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub instance: String,
    pub fingerprint: String,
    pub rel_tol: f64,
    pub samples: usize,
    pub seed: u64,
    pub checks: Vec<CheckRecord>,
    pub verdict: bool,
}

impl Report {
    pub fn new(
        instance: impl Into<String>,
        fingerprint: String,
        ctx: &Context<'_>,
        checks: Vec<CheckRecord>,
    ) -> Self {
        let verdict = checks.iter().all(|c| c.passed);
        Report {
            instance: instance.into(),
            fingerprint,
            rel_tol: ctx.tol.rel_eps,
            samples: ctx.samples,
            seed: ctx.seed,
            checks,
            verdict,
        }
    }

    /// The report with every timing zeroed, for comparing runs.
    pub fn without_timings(&self) -> Report {
        let mut r = self.clone();
        r.checks.iter_mut().for_each(|c| c.elapsed_ms = 0.0);
        r
    }

    pub fn to_json_bytes(&self) -> Vec<u8> {
        let mut out = crate::instances::to_json_bytes(self);
        out.push(b'\n');
        out
    }
}
