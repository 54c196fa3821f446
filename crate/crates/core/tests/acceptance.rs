//! Acceptance criteria, one PASS/FAIL line each. Runs without the libtest harness so the lines
//! always reach the console.

use kpoincare::convalg::convalg_residuals;
use kpoincare::relations::{
    check_coproduct_fns, check_coproduct_generators, check_flow_commutators, check_generator_brackets,
    hopf_group_level, zakrzewski_bridge, OpCheck,
};
use kpoincare::report::{Residual, RunConfig};
use kpoincare::suites::{decomp_residuals, groupoid_residuals, run, MEASURE_EPS_FRACS, MEASURE_GRID};
use kpoincare::twist::{
    cocycle_check, delta_twisted_check, measure_residuals, minkowski_action, twist_generator_check,
    twist_group_checks,
};
use kpoincare::Result;
use std::time::Instant;

const SEED: u64 = 1;
const DIMS: [usize; 3] = [1, 2, 3];

struct Criterion {
    id: usize,
    title: &'static str,
    /// Largest tolerance any residual of the criterion may carry.
    ceiling: Option<f64>,
    time_limit: Option<f64>,
}

fn judge(c: &Criterion, rs: Result<Vec<Residual>>, start: Instant, extra: Option<(bool, String)>) -> bool {
    let secs = start.elapsed().as_secs_f64();
    let rs = match rs {
        Ok(rs) => rs,
        Err(e) => {
            println!("FAIL criterion {}: {} (error: {e})", c.id, c.title);
            return false;
        }
    };
    let mut problems = Vec::new();
    for r in &rs {
        if !r.pass {
            problems.push(format!("{} = {:.2e} > {:.0e}", r.name, r.residual, r.tol));
        }
        if let Some(ceil) = c.ceiling {
            if r.tol > ceil {
                problems.push(format!("{} carries tolerance {:.0e} above {:.0e}", r.name, r.tol, ceil));
            }
        }
    }
    if rs.is_empty() {
        problems.push("no residuals".into());
    }
    if let Some(limit) = c.time_limit {
        if secs > limit {
            problems.push(format!("took {secs:.1} s, limit {limit} s"));
        }
    }
    let mut note = String::new();
    if let Some((ok, msg)) = extra {
        if !ok {
            problems.push(msg.clone());
        }
        note = format!("; {msg}");
    }
    let worst = rs
        .iter()
        .filter(|r| r.tol > 0.0)
        .max_by(|a, b| (a.residual / a.tol).total_cmp(&(b.residual / b.tol)));
    let worst = worst
        .map(|r| format!(", tightest {} = {:.2e} (tol {:.0e})", r.name, r.residual, r.tol))
        .unwrap_or_default();
    let pass = problems.is_empty();
    println!(
        "{} criterion {}: {} [{} residuals{worst}{note}, {secs:.1} s]",
        if pass { "PASS" } else { "FAIL" },
        c.id,
        c.title,
        rs.len()
    );
    for p in problems {
        println!("    {p}");
    }
    pass
}

fn per_dim(f: impl Fn(usize) -> Result<Vec<Residual>>) -> Result<Vec<Residual>> {
    let mut out = Vec::new();
    for n in DIMS {
        for mut r in f(n)? {
            r.name = format!("n{n}/{}", r.name);
            out.push(r);
        }
    }
    Ok(out)
}

fn op(n: usize) -> OpCheck {
    OpCheck::new(n, SEED, 100)
}

fn main() {
    let mut all = true;

    let c = Criterion {
        id: 1,
        title: "decomposition round trips and swap identities",
        ceiling: Some(1e-9),
        time_limit: Some(10.0),
    };
    let t = Instant::now();
    all &= judge(&c, per_dim(|n| decomp_residuals(n, SEED, 1000, 1e-9)), t, None);

    let c = Criterion {
        id: 2,
        title: "groupoid axioms, Gamma_A isomorphism and chart identities",
        ceiling: Some(1e-9),
        time_limit: None,
    };
    let t = Instant::now();
    all &= judge(&c, per_dim(|n| groupoid_residuals(n, SEED, 1000, 1e-9)), t, None);

    let c = Criterion {
        id: 3,
        title: "commutation relations and Zakrzewski relations",
        ceiling: Some(1e-4),
        time_limit: None,
    };
    let t = Instant::now();
    let rs = per_dim(|n| {
        let cfg = op(n);
        assert!(cfg.samples >= 100 && cfg.funcs >= 5 && cfg.h == 1e-5);
        let mut r = check_flow_commutators(&cfg)?;
        r.extend(check_generator_brackets(&cfg)?);
        r.extend(zakrzewski_bridge(&cfg)?);
        Ok(r)
    });
    all &= judge(&c, rs, t, None);

    let c = Criterion {
        id: 4,
        title: "coproducts, coassociativity and classical Hopf identities",
        ceiling: Some(1e-6),
        time_limit: None,
    };
    let t = Instant::now();
    let rs = per_dim(|n| {
        let cfg = op(n);
        let mut r = check_coproduct_fns(&cfg)?;
        r.extend(check_coproduct_generators(&cfg)?);
        r.extend(hopf_group_level(&cfg, 1e-12)?);
        Ok(r)
    });
    all &= judge(&c, rs, t, None);

    let c = Criterion {
        id: 5,
        title: "twist group law, cocycle, generators and Minkowski identities",
        ceiling: Some(1e-6),
        time_limit: None,
    };
    let t = Instant::now();
    let rs = per_dim(|n| {
        let cfg = op(n);
        let mut r = twist_group_checks(&cfg)?;
        r.extend(cocycle_check(&cfg)?);
        r.extend(delta_twisted_check(&cfg)?);
        r.extend(twist_generator_check(&cfg)?);
        r.extend(minkowski_action(&cfg)?);
        Ok(r)
    });
    all &= judge(&c, rs, t, None);

    let c = Criterion {
        id: 6,
        title: "convolution algebra at n = 1, grid 16",
        ceiling: None,
        time_limit: Some(180.0),
    };
    let t = Instant::now();
    let rs = convalg_residuals(16, SEED, 1e-9, 1e-6);
    let extra = rs.as_ref().ok().map(|rs| {
        let need = ["convolution_associativity_ratio_grid16_to_32", "pi_bound_random_boxes", "chi_eps_bound"];
        let missing: Vec<&str> = need
            .iter()
            .copied()
            .filter(|k| !rs.iter().any(|r| r.name == *k))
            .collect();
        let ratio = rs
            .iter()
            .find(|r| r.name == "convolution_associativity_ratio_grid16_to_32")
            .map(|r| format!("associativity ratio defect {:.2}", r.residual))
            .unwrap_or_default();
        (missing.is_empty(), if missing.is_empty() { ratio } else { format!("missing {missing:?}") })
    });
    all &= judge(&c, rs, t, extra);

    let c = Criterion {
        id: 7,
        title: "measure estimate below the analytic bound, linear in eps",
        ceiling: None,
        time_limit: None,
    };
    let t = Instant::now();
    let rs = (|| {
        let mut out = Vec::new();
        for n in [1usize, 2] {
            for mut r in measure_residuals(n, SEED, 100_000, &MEASURE_GRID, &MEASURE_EPS_FRACS)? {
                r.name = format!("n{n}/{}", r.name);
                out.push(r);
            }
        }
        Ok(out)
    })();
    all &= judge(&c, rs, t, None);

    let c = Criterion {
        id: 8,
        title: "identical seeds give byte-identical reports",
        ceiling: None,
        time_limit: None,
    };
    let t = Instant::now();
    let cfg = RunConfig {
        suites: ["decomp", "groupoid", "brackets", "coproducts", "hopf", "twist", "minkowski", "measure"]
            .map(String::from)
            .to_vec(),
        ..RunConfig::default()
    };
    let rs = (|| {
        let a = run(&cfg)?.to_json();
        let b = run(&cfg)?.to_json();
        let differ = a.bytes().zip(b.bytes()).filter(|(x, y)| x != y).count() + a.len().abs_diff(b.len());
        Ok(vec![Residual::new("report_byte_differences", differ as f64, 2, None, 0.0)])
    })();
    all &= judge(&c, rs, t, None);

    if !all {
        println!("acceptance: at least one criterion failed");
        std::process::exit(1);
    }
    println!("acceptance: all criteria passed");
}
