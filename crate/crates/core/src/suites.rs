//! Decomposition and groupoid residual suites, and the orchestrator that runs named suites into a report.

use crate::convalg::convalg_residuals;
use crate::decomp::{
    a_factor, b_r, ca_project, block_invariant_residual, factor_bc, factor_cb, swap_bc_to_cb, swap_cb_to_bc,
};
use crate::error::{Error, Result};
use crate::groupoid::{
    ga_compose, ga_ends, ga_inverse, gamma00_join, gamma00_split, gamma00_swap, gamma_a_iso, gamma_a_iso_inv,
    gb_compose, gb_ends, gb_inverse, from_gamma0, phi_chart, psi_chart, AGroupoidPoint, Gamma0Coord, GroupoidPoint,
};
use crate::groups::{
    c_mul, embed_a, embed_b, embed_c, gaussian_vec, random_rotation, sample_a, sample_b, sample_c, stream_rng, AParam,
};
use crate::minkalg::GroupMatrix;
use crate::relations::{
    check_coproduct_fns, check_coproduct_generators, check_flow_commutators, check_generator_brackets,
    hopf_group_level, zakrzewski_bridge, OpCheck,
};
use crate::report::{Report, Residual, RunConfig, SuiteResult};
use crate::twist::{
    cocycle_check, delta_twisted_check, measure_bound_check, measure_residuals, minkowski_action,
    twist_generator_check, twist_group_checks, MeasureParams,
};
use nalgebra::DMatrix;
use rand_chacha::ChaCha8Rng;
use std::time::Instant;

/// Every suite, in the order `all` runs them.
pub const SUITES: [&str; 11] = [
    "decomp",
    "groupoid",
    "brackets",
    "flows",
    "coproducts",
    "zakrzewski",
    "hopf",
    "twist",
    "minkowski",
    "measure",
    "grid",
];

/// (M, δ) pairs and ε/δ fractions of the default measure grid.
pub const MEASURE_GRID: [(f64, f64); 2] = [(10.0, 0.5), (100.0, 0.25)];
pub const MEASURE_EPS_FRACS: [f64; 2] = [0.1, 0.01];

/// ‖A − B‖∞ / max(1, ‖A‖∞).
fn rel(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).amax() / a.amax().max(1.0)
}

fn rel_m(a: &GroupMatrix, b: &GroupMatrix) -> f64 {
    rel(&a.m, &b.m)
}

fn rng(seed: u64, n: usize, tag: u64, i: usize) -> ChaCha8Rng {
    stream_rng(seed ^ (tag << 40) ^ ((n as u64) << 56), i as u64)
}

fn max_of(vals: &[f64]) -> f64 {
    vals.iter()
        .fold(0.0f64, |m, &v| if v.is_nan() { f64::INFINITY } else { m.max(v) })
}

/// Runs a per-sample check returning several residuals and keeps the componentwise maxima.
fn par_max_vec<F>(count: usize, width: usize, f: F) -> Result<Vec<f64>>
where
    F: Fn(usize) -> Result<Vec<f64>> + Sync + Send,
{
    use rayon::prelude::*;
    let rows: Vec<Result<Vec<f64>>> = (0..count).into_par_iter().map(f).collect();
    let mut out = vec![0.0f64; width];
    for row in rows {
        let row = row?;
        for (o, v) in out.iter_mut().zip(row) {
            *o = max_of(&[*o, v]);
        }
    }
    Ok(out)
}

/// Factorization round trips and swap identities on random elements.
pub fn decomp_residuals(n: usize, seed: u64, samples: usize, tol: f64) -> Result<Vec<Residual>> {
    const NAMES: [&str; 8] = [
        "swap_round_trip_bc",
        "swap_round_trip_cb",
        "factor_bc_reconstruction",
        "factor_cb_reconstruction",
        "ca_project_reconstruction",
        "ca_a_factor_inverse",
        "swap_scale_identity",
        "swap_orthogonal_block_invariant",
    ];
    let r = par_max_vec(samples, NAMES.len(), |i| {
        let mut g = rng(seed, n, 1, i);
        let b = sample_b(&mut g, n);
        let c = sample_c(&mut g, n);
        let cb = swap_bc_to_cb(&b, &c)?;
        let back = swap_cb_to_bc(&cb.c, &cb.b)?;
        let rt_bc = back.b.dist(&b).max(back.c.dist(&c) / c.s.max(1.0));
        let bc2 = swap_cb_to_bc(&c, &b)?;
        let fwd = swap_bc_to_cb(&bc2.b, &bc2.c)?;
        let rt_cb = fwd.b.dist(&b).max(fwd.c.dist(&c) / c.s.max(1.0));

        let gbc = embed_b(&b).mul(&embed_c(&c));
        let f = factor_bc(&gbc)?;
        let fbc = rel_m(&gbc, &f.matrix()).max(f.b.dist(&b)).max(f.c.dist(&c) / c.s.max(1.0));
        let gcb = embed_c(&c).mul(&embed_b(&b));
        let f = factor_cb(&gcb)?;
        let fcb = rel_m(&gcb, &f.matrix()).max(f.b.dist(&b)).max(f.c.dist(&c) / c.s.max(1.0));

        // ca_project needs α ≠ 0; the samplers hit α = 0 with probability zero. Both factors grow
        // like 1/|α|, so the reconstruction is measured as a backward error of the product.
        let ca = ca_project(&b)?;
        let ca_scale = embed_c(&ca.c).m.amax() * embed_a(&ca.a).m.amax();
        let ca_rec = (&embed_b(&b).m - &ca.matrix().m).amax() / ca_scale;
        let a = sample_a(&mut g, n);
        let back_a = ca_project(&a_factor(&a).b)?.a;
        let ca_inv = (&back_a.z - &a.z)
            .amax()
            .max((&back_a.u - &a.u).amax())
            .max((back_a.d - a.d).abs());

        let scale = (cb.c.s * (cb.b.alpha - 1.0) - (b.alpha - 1.0) / c.s).abs() / (1.0 / c.s).max(1.0);
        let block = if (b.alpha - 1.0).abs() > 1e-6 && (cb.b.alpha - 1.0).abs() > 1e-6 {
            block_invariant_residual(&b, &cb.b)
        } else {
            0.0
        };
        Ok(vec![rt_bc, rt_cb, fbc, fcb, ca_rec, ca_inv, scale, block])
    })?;
    Ok(NAMES
        .iter()
        .zip(r)
        .map(|(name, v)| Residual::new(*name, v, samples, None, tol))
        .collect())
}

/// K ∈ O(n) with det K = −1.
fn o_minus(g: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let mut k = random_rotation(g, n);
    for r in 0..n {
        k[(r, n - 1)] = -k[(r, n - 1)];
    }
    k
}

fn a_dist(a: &AParam, b: &AParam) -> f64 {
    (&a.z - &b.z)
        .amax()
        .max((&a.u - &b.u).amax())
        .max((a.d - b.d).abs())
}

fn ga_dist(p: &AGroupoidPoint, q: &AGroupoidPoint) -> f64 {
    a_dist(&p.a, &q.a).max(p.c.dist(&q.c))
}

/// A composable triple of G_B.
fn gb_triple(g: &mut ChaCha8Rng, n: usize) -> Result<[GroupoidPoint; 3]> {
    let g1 = GroupoidPoint::new(sample_b(g, n), sample_c(g, n));
    let g2 = GroupoidPoint::new(gb_ends(&g1)?.1, sample_c(g, n));
    let g3 = GroupoidPoint::new(gb_ends(&g2)?.1, sample_c(g, n));
    Ok([g1, g2, g3])
}

/// A composable triple of Γ_A; redraws until every right end has a CA factorization.
fn ga_triple(g: &mut ChaCha8Rng, n: usize) -> [AGroupoidPoint; 3] {
    loop {
        let mut attempt = || -> Result<[AGroupoidPoint; 3]> {
            let p1 = AGroupoidPoint {
                a: sample_a(g, n),
                c: sample_c(g, n),
            };
            let p2 = AGroupoidPoint {
                a: ga_ends(&p1)?.1,
                c: sample_c(g, n),
            };
            let p3 = AGroupoidPoint {
                a: ga_ends(&p2)?.1,
                c: sample_c(g, n),
            };
            ga_ends(&p3)?;
            Ok([p1, p2, p3])
        };
        if let Ok(t) = attempt() {
            return t;
        }
    }
}

/// Groupoid laws on G_B and Γ_A, the Γ_A ≅ Γ_{B′} isomorphism and the Γ₀ chart identities.
pub fn groupoid_residuals(n: usize, seed: u64, samples: usize, tol: f64) -> Result<Vec<Residual>> {
    const NAMES: [&str; 17] = [
        "gb_associativity",
        "gb_product_matrix",
        "gb_ends_of_product",
        "gb_units",
        "gb_inverses",
        "gb_inverse_ends",
        "gb_action_axiom",
        "ga_associativity",
        "ga_product_matrix",
        "ga_units",
        "ga_inverses",
        "ga_iso_intertwines_composition",
        "ga_iso_round_trip",
        "chart_psi_inverts_phi",
        "chart_psi_det_minus_one",
        "gamma00_swap_matrix",
        "gamma00_split_composition",
    ];
    let r = par_max_vec(samples, NAMES.len(), |i| {
        let mut g = rng(seed, n, 2, i);
        let [g1, g2, g3] = gb_triple(&mut g, n)?;
        let g12 = gb_compose(&g1, &g2)?;
        let g23 = gb_compose(&g2, &g3)?;
        let assoc = gb_compose(&g12, &g3)?.dist(&gb_compose(&g1, &g23)?);
        let prod = embed_b(&g2.b).inverse();
        let pm = rel_m(&g12.matrix(), &g1.matrix().mul(&prod).mul(&g2.matrix()));
        let (l12, r12) = gb_ends(&g12)?;
        let ends = l12.dist(&g1.b).max(r12.dist(&gb_ends(&g2)?.1));
        let (l1, r1) = gb_ends(&g1)?;
        let units = gb_compose(&GroupoidPoint::unit(l1.clone()), &g1)?
            .dist(&g1)
            .max(gb_compose(&g1, &GroupoidPoint::unit(r1.clone()))?.dist(&g1));
        let inv = gb_inverse(&g1)?;
        let inverses = gb_compose(&g1, &inv)?
            .dist(&GroupoidPoint::unit(l1.clone()))
            .max(gb_compose(&inv, &g1)?.dist(&GroupoidPoint::unit(r1.clone())))
            .max(gb_inverse(&inv)?.dist(&g1));
        let (li, ri) = gb_ends(&inv)?;
        let inv_ends = li.dist(&r1).max(ri.dist(&l1));
        let action = b_r(&b_r(&g1.b, &g2.c)?, &g3.c)?.dist(&b_r(&g1.b, &c_mul(&g2.c, &g3.c))?);

        let [p1, p2, p3] = ga_triple(&mut g, n);
        let p12 = ga_compose(&p1, &p2)?;
        let p23 = ga_compose(&p2, &p3)?;
        let ga_assoc = ga_dist(&ga_compose(&p12, &p3)?, &ga_compose(&p1, &p23)?);
        let ga_pm = rel_m(
            &p12.matrix(),
            &p1.matrix().mul(&embed_a(&p2.a).inverse()).mul(&p2.matrix()),
        );
        let (al, ar) = ga_ends(&p1)?;
        let unit = |a: AParam| AGroupoidPoint {
            a,
            c: crate::groups::CParam::identity(n),
        };
        let ga_units = ga_dist(&ga_compose(&unit(al.clone()), &p1)?, &p1)
            .max(ga_dist(&ga_compose(&p1, &unit(ar.clone()))?, &p1));
        let pinv = ga_inverse(&p1)?;
        let ga_inv = ga_dist(&ga_compose(&p1, &pinv)?, &unit(al))
            .max(ga_dist(&ga_compose(&pinv, &p1)?, &unit(ar)));

        let iso12 = gb_compose(&gamma_a_iso(&p1), &gamma_a_iso(&p2))?;
        let intertwine = gamma_a_iso(&p12).dist(&iso12);
        let mut round = ga_dist(&gamma_a_iso_inv(&gamma_a_iso(&p1))?, &p1);
        if let Ok(q) = gamma_a_iso_inv(&g1) {
            round = round.max(gamma_a_iso(&q).dist(&g1));
        }

        let k = o_minus(&mut g, n);
        let v = gaussian_vec(&mut g, n);
        let (k2, v2) = psi_chart(&phi_chart(&k, &v))?;
        let mut psi = (k2 - &k).amax().max((v2 - &v).amax() / v.amax().max(1.0));
        let (kb, vb) = psi_chart(&g1.b)?;
        psi = psi.max(phi_chart(&kb, &vb).dist(&g1.b));
        let det = (psi_chart(&g1.b)?.0.determinant() + 1.0).abs();

        let c = sample_c(&mut g, n);
        let (ct, (k3, vp)) = gamma00_swap(&k, &v, &c);
        let swap = rel_m(
            &embed_b(&phi_chart(&k, &v)).mul(&embed_c(&c)),
            &embed_c(&ct).mul(&embed_b(&phi_chart(&k3, &vp))),
        );

        let (x1, x2, x3) = (gaussian_vec(&mut g, n), gaussian_vec(&mut g, n), gaussian_vec(&mut g, n));
        let (t1, t2) = (sample_c(&mut g, n).s, sample_c(&mut g, n).s);
        let h1 = from_gamma0(&Gamma0Coord {
            k: k.clone(),
            t: t1,
            x1: x1.clone(),
            x2: x2.clone(),
        });
        let h2 = from_gamma0(&Gamma0Coord {
            k: k.clone(),
            t: t2,
            x1: x2.clone(),
            x2: x3.clone(),
        });
        let h13 = from_gamma0(&Gamma0Coord {
            k,
            t: t1 * t2,
            x1: x1.clone(),
            x2: x3,
        });
        let comp = gb_compose(&h1, &h2)?;
        let (v1, c1) = gamma00_split(t1, &x1, &x2);
        let (tj, xa, xb) = gamma00_join(&v1, &c1);
        let split = (comp.b.dist(&h13.b) + comp.c.dist(&h13.c) / (t1 * t2).max(1.0))
            .max((tj - t1).abs() + (xa - &x1).amax() + (xb - &x2).amax());

        Ok(vec![
            assoc, pm, ends, units, inverses, inv_ends, action, ga_assoc, ga_pm, ga_units, ga_inv, intertwine,
            round, psi, det, swap, split,
        ])
    })?;
    Ok(NAMES
        .iter()
        .zip(r)
        .map(|(name, v)| Residual::new(*name, v, samples, None, tol))
        .collect())
}

fn op_check(cfg: &RunConfig) -> OpCheck {
    let mut op = OpCheck::new(cfg.n, cfg.seed, cfg.samples);
    op.funcs = cfg.test_functions;
    op.h = cfg.fd_step;
    op.h_composed = cfg.fd_step_composed;
    op.tol_fd = cfg.tol.fd;
    op.tol_composed = cfg.tol.composed;
    op.tol_exact = cfg.tol.exact;
    op
}

/// Expands `all` and rejects unknown suite names; the order follows [`SUITES`].
pub fn selected_suites(cfg: &RunConfig) -> Result<Vec<&'static str>> {
    for s in &cfg.suites {
        if s != "all" && !SUITES.contains(&s.as_str()) {
            return Err(Error::Config(format!("unknown suite: {s}")));
        }
    }
    if cfg.suites.is_empty() {
        return Err(Error::Config("no suite selected".into()));
    }
    let all = cfg.suites.iter().any(|s| s == "all");
    Ok(SUITES
        .iter()
        .copied()
        .filter(|s| all || cfg.suites.iter().any(|t| t == s))
        .collect())
}

/// Runs one named suite.
pub fn run_suite(name: &str, cfg: &RunConfig) -> Result<SuiteResult> {
    let op = op_check(cfg);
    let res = match name {
        "decomp" => SuiteResult::new(name, decomp_residuals(cfg.n, cfg.seed, 1000.max(cfg.samples), cfg.tol.exact)?),
        "groupoid" => SuiteResult::new(
            name,
            groupoid_residuals(cfg.n, cfg.seed, 1000.max(cfg.samples), cfg.tol.exact)?,
        ),
        "brackets" => SuiteResult::new(name, check_generator_brackets(&op)?),
        "flows" => SuiteResult::new(name, check_flow_commutators(&op)?),
        "coproducts" => {
            let mut r = check_coproduct_fns(&op)?;
            r.extend(check_coproduct_generators(&op)?);
            SuiteResult::new(name, r)
        }
        "zakrzewski" => SuiteResult::new(name, zakrzewski_bridge(&op)?),
        "hopf" => SuiteResult::new(name, hopf_group_level(&op, cfg.tol.hopf)?),
        "twist" => {
            let mut r = twist_group_checks(&op)?;
            r.extend(cocycle_check(&op)?);
            r.extend(delta_twisted_check(&op)?);
            r.extend(twist_generator_check(&op)?);
            SuiteResult::new(name, r)
        }
        "minkowski" => SuiteResult::new(name, minkowski_action(&op)?)
            .with_note("continuity of the twisted coaction is not verified numerically"),
        "measure" => match cfg.measure {
            Some([m, delta, eps]) => {
                let pairs = 4;
                let r = measure_bound_check(&MeasureParams {
                    n: cfg.n,
                    m,
                    delta,
                    eps,
                    samples: cfg.measure_samples,
                    seed: cfg.seed,
                    pairs,
                })?;
                let checked = cfg.measure_samples.min(20_000) * pairs;
                SuiteResult::new(
                    name,
                    vec![
                        Residual::new("measure_bound", r.ratio, cfg.measure_samples * pairs, None, 1.0),
                        Residual::new("measure_two_ball", r.two_ball_mismatches as f64, checked, None, 0.0),
                        Residual::new("measure_containment", r.containment, checked, None, 1.0),
                    ],
                )
            }
            None => SuiteResult::new(
                name,
                measure_residuals(cfg.n, cfg.seed, cfg.measure_samples, &MEASURE_GRID, &MEASURE_EPS_FRACS)?,
            ),
        },
        "grid" => {
            let mut s = SuiteResult::new(name, convalg_residuals(cfg.grid, cfg.seed, cfg.tol.exact, cfg.tol.fd)?);
            if cfg.n != 1 {
                s = s.with_note(format!("grid checks always run at n = 1 (config n = {})", cfg.n));
            }
            if cfg.grid < 16 {
                s = s.with_note(format!(
                    "grid {} is below the asymptotic range; the refinement ratio is not asserted",
                    cfg.grid
                ));
            }
            s
        }
        other => return Err(Error::Config(format!("unknown suite: {other}"))),
    };
    Ok(res)
}

/// Validates the configuration and runs every selected suite in order.
pub fn run(cfg: &RunConfig) -> Result<Report> {
    cfg.validate()?;
    let names = selected_suites(cfg)?;
    let start = Instant::now();
    let mut suites = Vec::with_capacity(names.len());
    for name in names {
        suites.push(run_suite(name, cfg)?);
    }
    Ok(Report::new(cfg.clone(), suites, start.elapsed().as_secs_f64()))
}

/// Random raw element of the group, as used by the decompose command.
pub fn sample_group_matrix(n: usize, seed: u64) -> GroupMatrix {
    let mut g = stream_rng(seed, 0);
    let b = sample_b(&mut g, n);
    let c = sample_c(&mut g, n);
    embed_b(&b).mul(&embed_c(&c))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decomp_suite_passes() {
        for n in 1..4 {
            for r in decomp_residuals(n, 3, 300, 1e-9).unwrap() {
                assert!(r.pass, "n={n} {r:?}");
            }
        }
    }

    #[test]
    fn groupoid_suite_passes() {
        for n in 1..4 {
            for r in groupoid_residuals(n, 3, 200, 1e-9).unwrap() {
                assert!(r.pass, "n={n} {r:?}");
            }
        }
    }

    #[test]
    fn suite_selection() {
        let mut cfg = RunConfig::default();
        assert_eq!(selected_suites(&cfg).unwrap().len(), SUITES.len());
        cfg.suites = vec!["groupoid".into(), "decomp".into()];
        assert_eq!(selected_suites(&cfg).unwrap(), vec!["decomp", "groupoid"]);
        cfg.suites = vec!["nope".into()];
        assert!(selected_suites(&cfg).is_err());
    }
}
