//! Built-in checks.

use super::{Check, Context, Measurement};
use crate::algebra::double_commutant_check;
use crate::hilbmod::b_inner;
use crate::intertwine::{check_linking_bicommutant, check_linking_commutant};
use crate::linops::{compare_spaces, frobenius, SubspaceReport};
use crate::selfdual::{
    build_l_phi, l_phi_intertwining_residual, norm_check, riesz_representative,
    validate_functional,
};

type Outcome = Result<Vec<Measurement>, String>;

/// A check backed by a plain function.
struct FnCheck {
    name: &'static str,
    description: &'static str,
    requires: &'static [&'static str],
    run: fn(&Context<'_>) -> Outcome,
}

impl Check for FnCheck {
    fn name(&self) -> &'static str {
        self.name
    }

    fn description(&self) -> &'static str {
        self.description
    }

    fn requires(&self) -> &'static [&'static str] {
        self.requires
    }

    fn run(&self, ctx: &Context<'_>) -> Outcome {
        (self.run)(ctx)
    }
}

const LIFTING: &[&str] = &["lifting.homomorphism", "lifting.intertwining"];

pub fn standard_checks() -> Vec<Box<dyn Check>> {
    let table = [
        FnCheck {
            name: "algebra.invariants",
            description: "B has an orthonormal basis, contains 1 and is closed under products and adjoints",
            requires: &[],
            run: algebra_invariants,
        },
        FnCheck {
            name: "algebra.double_commutant",
            description: "B'' = B, and dim B' matches the block structure when known",
            requires: &[],
            run: algebra_double_commutant,
        },
        FnCheck {
            name: "tensor.inner_products",
            description: "L_i* L_j = G_ij for all generator pairs",
            requires: &[],
            run: tensor_inner_products,
        },
        FnCheck {
            name: "tensor.totality",
            description: "the columns of the L_i span H",
            requires: &[],
            run: tensor_totality,
        },
        FnCheck {
            name: "module.closure",
            description: "E is closed under right multiplication by B",
            requires: &[],
            run: module_closure,
        },
        FnCheck {
            name: "lifting.homomorphism",
            description: "rho' is unital, multiplicative and *-preserving",
            requires: &[],
            run: lifting_homomorphism,
        },
        FnCheck {
            name: "lifting.intertwining",
            description: "rho'(b') x = x b' for x in E and b' in B'",
            requires: &["lifting.homomorphism"],
            run: lifting_intertwining,
        },
        FnCheck {
            name: "linking.commutant",
            description: "M' = { b' + rho'(b') } and dim M' = dim B'",
            requires: LIFTING,
            run: linking_commutant,
        },
        FnCheck {
            name: "center.equals_module",
            description: "E equals the B'-intertwiner space C_{B'}(B(G,H))",
            requires: LIFTING,
            run: center_equals_module,
        },
        FnCheck {
            name: "adjointable.equals_lifted_commutant",
            description: "B^a(E) computed directly equals rho'(B')'",
            requires: LIFTING,
            run: adjointable_equals_lifted_commutant,
        },
        FnCheck {
            name: "linking.bicommutant",
            description: "M'' = M and the (H,G) corner of M'' is E",
            requires: LIFTING,
            run: linking_bicommutant,
        },
        FnCheck {
            name: "functional.validity",
            description: "functional values lie in B and respect every generator relation",
            requires: &[],
            run: functional_validity,
        },
        FnCheck {
            name: "functional.l_phi",
            description: "L_Phi solves L_Phi L_i = v_i and intertwines rho' with B'",
            requires: &["lifting.homomorphism", "functional.validity"],
            run: functional_l_phi,
        },
        FnCheck {
            name: "functional.riesz",
            description: "y = L_Phi* lies in E and reproduces the values",
            requires: &["functional.validity"],
            run: functional_riesz,
        },
        FnCheck {
            name: "functional.norm",
            description: "|L_Phi| = |<y,y>|^(1/2), attained by the polar part of y and bounding sampled values",
            requires: &["functional.validity"],
            run: functional_norm,
        },
    ];
    table
        .into_iter()
        .map(|c| Box::new(c) as Box<dyn Check>)
        .collect()
}

fn err(e: crate::Error) -> String {
    e.to_string()
}

fn subspace(name: &str, r: SubspaceReport, tolerance: f64) -> Measurement {
    Measurement::bounded(name, r.distance, tolerance)
        .require(r.equal)
        .with_detail(format!("dimensions {} and {}", r.dim_a, r.dim_b))
}

fn algebra_invariants(ctx: &Context<'_>) -> Outcome {
    let r = ctx.algebra().invariant_residual().map_err(err)?;
    Ok(vec![Measurement::bounded("algebra.invariants", r, ctx.tol.cutoff(1.0))
        .with_detail(format!("dim B = {}", ctx.algebra().dim()))])
}

fn algebra_double_commutant(ctx: &Context<'_>) -> Outcome {
    let r = double_commutant_check(ctx.algebra(), ctx.tol).map_err(err)?;
    let mut m = subspace("algebra.double_commutant", r, ctx.tol.cutoff(1.0));
    let dim_bprime = ctx.bprime()?.dim();
    if let Some(want) = ctx.expected_commutant_dim {
        let detail = format!("{}; dim B' = {dim_bprime}, expected {want}", m.detail);
        m = m.require(dim_bprime == want).with_detail(detail);
    }
    Ok(vec![m])
}

fn tensor_inner_products(ctx: &Context<'_>) -> Outcome {
    let am = &ctx.realized.abstract_module;
    let l = &ctx.realized.tensor.l;
    let mut worst = 0.0f64;
    let mut scale = 1.0f64;
    for (i, row) in am.gram().iter().enumerate() {
        for (j, g) in row.iter().enumerate() {
            scale = scale.max(frobenius(g));
            worst = worst.max(frobenius(&(b_inner(&l[i], &l[j]) - g)));
        }
    }
    Ok(vec![Measurement::bounded(
        "tensor.inner_products",
        worst,
        ctx.tol.cutoff(scale),
    )])
}

fn tensor_totality(ctx: &Context<'_>) -> Outcome {
    let e = ctx.module();
    let rank = e.total_rank(ctx.tol);
    let missing = e.dim_h() - rank.min(e.dim_h());
    Ok(vec![Measurement::bounded("tensor.totality", missing as f64, 0.0)
        .with_detail(format!("rank {rank} of dim H = {}", e.dim_h()))])
}

fn module_closure(ctx: &Context<'_>) -> Outcome {
    let r = ctx.module().invariant_residual().map_err(err)?;
    Ok(vec![Measurement::bounded("module.closure", r, ctx.tol.cutoff(1.0))
        .with_detail(format!("dim E = {}", ctx.module().dim()))])
}

fn lifting_homomorphism(ctx: &Context<'_>) -> Outcome {
    let r = ctx.rho()?.homomorphism_residuals().map_err(err)?;
    Ok(vec![Measurement::bounded("lifting.homomorphism", r.worst(), ctx.tol.cutoff(1.0))
        .with_detail(format!(
            "unital {:e}, multiplicative {:e}, star {:e}",
            r.unital, r.multiplicative, r.star
        ))])
}

fn lifting_intertwining(ctx: &Context<'_>) -> Outcome {
    let r = ctx
        .rho()?
        .intertwining_residual(&ctx.module().basis())
        .map_err(err)?;
    Ok(vec![Measurement::bounded("lifting.intertwining", r, ctx.tol.cutoff(1.0))])
}

/// Checks that need `H` to be nonzero report a trivial pass otherwise.
fn zero_module(ctx: &Context<'_>, name: &str) -> Option<Vec<Measurement>> {
    (ctx.module().dim_h() == 0).then(|| {
        vec![Measurement::bounded(name, 0.0, ctx.tol.cutoff(1.0)).with_detail("dim H = 0")]
    })
}

fn linking_commutant(ctx: &Context<'_>) -> Outcome {
    if let Some(m) = zero_module(ctx, "linking.commutant") {
        return Ok(m);
    }
    let r = check_linking_commutant(ctx.linking()?, ctx.rho()?, ctx.tol).map_err(err)?;
    Ok(vec![Measurement::bounded("linking.commutant", r.span.distance, ctx.tol.cutoff(1.0))
        .require(r.holds())
        .with_detail(format!(
            "dim M' = {}, dim B' = {}, dim M = {}",
            r.dim_commutant,
            r.dim_bprime,
            ctx.linking()?.algebra.dim()
        ))])
}

fn center_equals_module(ctx: &Context<'_>) -> Outcome {
    let r = compare_spaces(ctx.module().space(), ctx.center()?.space(), ctx.tol).map_err(err)?;
    Ok(vec![subspace("center.equals_module", r, ctx.tol.cutoff(1.0))])
}

fn adjointable_equals_lifted_commutant(ctx: &Context<'_>) -> Outcome {
    if let Some(m) = zero_module(ctx, "adjointable.equals_lifted_commutant") {
        return Ok(m);
    }
    let r = ctx.adjointable()?.compare(ctx.tol).map_err(err)?;
    Ok(vec![subspace(
        "adjointable.equals_lifted_commutant",
        r,
        ctx.tol.cutoff(1.0),
    )])
}

fn linking_bicommutant(ctx: &Context<'_>) -> Outcome {
    if let Some(m) = zero_module(ctx, "linking.bicommutant") {
        return Ok(m);
    }
    let r = check_linking_bicommutant(ctx.linking()?, ctx.module(), ctx.tol).map_err(err)?;
    Ok(vec![Measurement::bounded(
        "linking.bicommutant",
        r.double.distance.max(r.corner.distance),
        ctx.tol.cutoff(1.0),
    )
    .require(r.holds())
    .with_detail(format!(
        "M'' vs M: {:e}; corner vs E: {:e}",
        r.double.distance, r.corner.distance
    ))])
}

fn per_functional(
    ctx: &Context<'_>,
    mut f: impl FnMut(usize, &crate::selfdual::Functional<'_>) -> Result<Measurement, String>,
) -> Outcome {
    (0..ctx.realized.functional_count())
        .map(|i| {
            let phi = ctx.realized.functional(i).map_err(err)?;
            f(i, &phi)
        })
        .collect()
}

fn functional_validity(ctx: &Context<'_>) -> Outcome {
    per_functional(ctx, |i, phi| {
        let v = validate_functional(phi, ctx.tol).map_err(err)?;
        Ok(Measurement::bounded(format!("functional.validity[{i}]"), v.worst_residual, v.allowed)
            .with_detail(format!("{} relations", v.relations)))
    })
}

fn functional_l_phi(ctx: &Context<'_>) -> Outcome {
    let rho = ctx.rho()?;
    per_functional(ctx, |i, phi| {
        let l = build_l_phi(phi, ctx.tol).map_err(err)?;
        let inter = l_phi_intertwining_residual(&l.op, rho);
        let scale = frobenius(&l.op).max(1.0);
        Ok(Measurement::bounded(
            format!("functional.l_phi[{i}]"),
            l.residual.max(inter),
            ctx.tol.cutoff(scale),
        )
        .with_detail(format!("solve {:e}, intertwining {inter:e}", l.residual)))
    })
}

fn functional_riesz(ctx: &Context<'_>) -> Outcome {
    per_functional(ctx, |i, phi| {
        let r = riesz_representative(phi, ctx.tol).map_err(err)?;
        let scale = frobenius(&r.y).max(1.0);
        Ok(Measurement::bounded(
            format!("functional.riesz[{i}]"),
            r.membership_residual.max(r.fidelity_residual),
            ctx.tol.cutoff(scale),
        )
        .with_detail(format!(
            "membership {:e}, fidelity {:e}",
            r.membership_residual, r.fidelity_residual
        )))
    })
}

fn functional_norm(ctx: &Context<'_>) -> Outcome {
    per_functional(ctx, |i, phi| {
        let seed = ctx.seed.wrapping_add(i as u64);
        let r = norm_check(phi, ctx.samples, seed, ctx.tol).map_err(err)?;
        let allowed = ctx.tol.cutoff(r.opnorm.max(1.0));
        let gap = (r.opnorm - r.riesz_norm).abs();
        let overshoot = (r.sampled_lower_bound - r.opnorm).max(0.0);
        let shortfall = (r.opnorm - r.polar_witness).max(0.0);
        Ok(Measurement::bounded(
            format!("functional.norm[{i}]"),
            gap.max(overshoot).max(shortfall),
            allowed,
        )
        .with_detail(format!(
            "|L_Phi| = {:.12e}, |<y,y>|^(1/2) = {:.12e}, sampled {:.12e}, polar {:.12e}",
            r.opnorm, r.riesz_norm, r.sampled_lower_bound, r.polar_witness
        )))
    })
}
