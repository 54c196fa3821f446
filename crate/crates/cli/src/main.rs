use clap::{Args, Parser, Subcommand};
use kpoincare::convalg::sample_product;
use kpoincare::decomp::{factor_bc, factor_ca, factor_cb};
use kpoincare::groups::{embed_b, embed_c, AParam, BParam, CParam};
use kpoincare::minkalg::GroupMatrix;
use kpoincare::report::RunConfig;
use kpoincare::suites::{run, sample_group_matrix};
use kpoincare::Error;
use nalgebra::{DMatrix, DVector};
use serde_json::{json, Value};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "kpoincare", version, about = "Verification suites for the groupoid model of the kappa-Poincare group")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Factor one group element as BC, CB and (when defined) CA.
    Decompose(DecomposeArgs),
    /// Run verification suites and emit a JSON report.
    Verify(RunArgs),
    /// Run the n = 1 grid, twist and measure suites.
    Grid(GridArgs),
}

#[derive(Args)]
struct DecomposeArgs {
    /// Dimension n (the group is SO0(1, n+1)).
    #[arg(long, default_value_t = 1)]
    n: usize,
    /// Seed for a random element when no element is given.
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Raw (n+2)x(n+2) matrix, rows separated by ';', entries by ',' or spaces.
    #[arg(long, conflicts_with_all = ["b", "c"])]
    matrix: Option<String>,
    /// SO(n+1) block [[Λ, u], [wᵗ, α]] as (n+1) rows; the element is b·c.
    #[arg(long)]
    b: Option<String>,
    /// C element as "s, y1, ..., yn".
    #[arg(long)]
    c: Option<String>,
    /// Tolerance of the membership checks on the input.
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Samples per operator check.
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    fd_step: Option<f64>,
    #[arg(long)]
    fd_step_composed: Option<f64>,
    #[arg(long)]
    test_functions: Option<usize>,
    #[arg(long)]
    tol_exact: Option<f64>,
    #[arg(long)]
    tol_fd: Option<f64>,
    #[arg(long)]
    tol_composed: Option<f64>,
    #[arg(long)]
    tol_hopf: Option<f64>,
    /// Suites to run, comma separated or repeated; `all` runs every suite.
    #[arg(long, value_delimiter = ',')]
    suite: Vec<String>,
    /// Cells per axis of the coarse grid.
    #[arg(long)]
    grid: Option<usize>,
    #[arg(long)]
    measure_samples: Option<usize>,
    /// Single measure check, e.g. "M=10 delta=0.5 eps=0.05".
    #[arg(long)]
    measure: Option<String>,
    /// Flat `key = value` configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GridArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Also write a sample convolution f1 * f2 on the grid as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
}

fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

/// Defaults, then the config file, then flags.
fn resolve(args: &RunArgs, mut cfg: RunConfig) -> Result<RunConfig, Error> {
    if let Some(path) = &args.config {
        cfg.apply_file(path).map_err(|e| match e {
            Error::Io(m) => config_err(format!("cannot read {}: {m}", path.display())),
            other => other,
        })?;
    }
    macro_rules! set {
        ($field:ident, $target:expr) => {
            if let Some(v) = args.$field {
                $target = v;
            }
        };
    }
    set!(n, cfg.n);
    set!(seed, cfg.seed);
    set!(samples, cfg.samples);
    set!(fd_step, cfg.fd_step);
    set!(fd_step_composed, cfg.fd_step_composed);
    set!(test_functions, cfg.test_functions);
    set!(tol_exact, cfg.tol.exact);
    set!(tol_fd, cfg.tol.fd);
    set!(tol_composed, cfg.tol.composed);
    set!(tol_hopf, cfg.tol.hopf);
    set!(grid, cfg.grid);
    set!(measure_samples, cfg.measure_samples);
    if let Some(m) = &args.measure {
        cfg.measure = Some(RunConfig::parse_measure(m)?);
    }
    if !args.suite.is_empty() {
        cfg.suites = args.suite.iter().map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn emit(text: &str, out: &Option<PathBuf>) -> Result<(), Error> {
    match out {
        Some(p) => std::fs::write(p, text).map_err(Error::from),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run_report(cfg: &RunConfig, out: &Option<PathBuf>) -> Result<bool, Error> {
    let report = run(cfg)?;
    emit(&report.to_json(), out)?;
    eprintln!(
        "{} suite(s), {} in {:.1} s",
        report.suites.len(),
        if report.pass { "all passed" } else { "FAILED" },
        report.wall_time_s
    );
    for s in report.suites.iter().filter(|s| !s.pass) {
        for r in s.residuals.iter().filter(|r| !r.pass) {
            eprintln!("  {}/{}: {:e} > {:e}", s.name, r.name, r.residual, r.tol);
        }
    }
    Ok(report.pass)
}

fn parse_numbers(text: &str) -> Result<Vec<f64>, Error> {
    text.split([',', ' ', '\t'])
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<f64>().map_err(|_| config_err(format!("not a number: {t}"))))
        .collect()
}

fn parse_matrix(text: &str) -> Result<DMatrix<f64>, Error> {
    let rows: Vec<Vec<f64>> = text
        .split(';')
        .filter(|r| !r.trim().is_empty())
        .map(parse_numbers)
        .collect::<Result<_, _>>()?;
    let d = rows.len();
    if d == 0 || rows.iter().any(|r| r.len() != d) {
        return Err(config_err(format!("expected a square matrix, got {d} rows of lengths {:?}", rows.iter().map(Vec::len).collect::<Vec<_>>())));
    }
    Ok(DMatrix::from_fn(d, d, |i, j| rows[i][j]))
}

fn element(args: &DecomposeArgs) -> Result<GroupMatrix, Error> {
    if let Some(m) = &args.matrix {
        return GroupMatrix::checked(parse_matrix(m)?, args.tol);
    }
    if args.b.is_none() && args.c.is_none() {
        return Ok(sample_group_matrix(args.n, args.seed));
    }
    let n = args.n;
    let b = match &args.b {
        Some(t) => {
            let m = parse_matrix(t)?;
            if m.nrows() != n + 1 {
                return Err(config_err(format!("--b must be {0}x{0} for n = {n}", n + 1)));
            }
            let b = BParam::from_block(&m);
            b.validate(args.tol)?;
            b
        }
        None => BParam::identity(n),
    };
    let c = match &args.c {
        Some(t) => {
            let v = parse_numbers(t)?;
            if v.len() != n + 1 {
                return Err(config_err(format!("--c needs s and {n} entries of y")));
            }
            CParam::new(v[0], DVector::from_column_slice(&v[1..]))?
        }
        None => CParam::identity(n),
    };
    Ok(embed_b(&b).mul(&embed_c(&c)))
}

/// Adding 0.0 prints −0.0 as 0.0.
fn clean(x: f64) -> f64 {
    x + 0.0
}

fn rows(m: &DMatrix<f64>) -> Value {
    json!((0..m.nrows()).map(|i| m.row(i).iter().map(|&x| clean(x)).collect::<Vec<_>>()).collect::<Vec<_>>())
}

fn vec_json(v: &DVector<f64>) -> Value {
    json!(v.iter().map(|&x| clean(x)).collect::<Vec<_>>())
}

fn b_json(b: &BParam) -> Value {
    json!({"lambda": rows(&b.lam), "u": vec_json(&b.u), "w": vec_json(&b.w), "alpha": clean(b.alpha)})
}

fn c_json(c: &CParam) -> Value {
    json!({"s": clean(c.s), "y": vec_json(&c.y)})
}

fn a_json(a: &AParam) -> Value {
    json!({"z": vec_json(&a.z), "U": rows(&a.u), "d": clean(a.d)})
}

fn decompose(args: &DecomposeArgs) -> Result<Value, Error> {
    let g = element(args)?;
    let resid = |m: &GroupMatrix| (&g.m - &m.m).amax();
    let bc = factor_bc(&g)?;
    let cb = factor_cb(&g)?;
    let ca = match factor_ca(&g) {
        Ok(f) => json!({"c": c_json(&f.c), "a": a_json(&f.a), "residual": resid(&f.matrix())}),
        Err(e) => json!({"undefined": e.to_string()}),
    };
    Ok(json!({
        "n": g.n,
        "matrix": rows(&g.m),
        "eta_residual": g.eta_residual(),
        "bc": {"b": b_json(&bc.b), "c": c_json(&bc.c), "residual": resid(&bc.matrix())},
        "cb": {"c": c_json(&cb.c), "b": b_json(&cb.b), "residual": resid(&cb.matrix())},
        "ca": ca,
    }))
}

fn grid(args: &GridArgs) -> Result<bool, Error> {
    let mut base = RunConfig {
        n: 1,
        suites: vec!["grid".into(), "twist".into(), "measure".into()],
        ..RunConfig::default()
    };
    if args.run.suite.is_empty() && args.run.measure.is_some() {
        base.suites = vec!["measure".into()];
    }
    let cfg = resolve(&args.run, base)?;
    if cfg.n != 1 {
        return Err(config_err("the grid command runs at n = 1"));
    }
    if let Some(path) = &args.csv {
        let f = sample_product(cfg.grid, cfg.seed)?;
        let file = std::fs::File::create(path)?;
        f.write_csv(file)?;
    }
    run_report(&cfg, &args.run.out)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    // Every decompose failure comes from the supplied element, so it is an input error.
    let input_only = matches!(cli.command, Command::Decompose(_));
    let outcome = match &cli.command {
        Command::Decompose(a) => decompose(a).and_then(|v| {
            let mut s = serde_json::to_string_pretty(&v).expect("json");
            s.push('\n');
            print!("{s}");
            Ok(true)
        }),
        Command::Verify(a) => resolve(a, RunConfig::default()).and_then(|cfg| run_report(&cfg, &a.out)),
        Command::Grid(a) => grid(a),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                _ if input_only => ExitCode::from(2),
                Error::Config(_) | Error::Invariant { .. } | Error::Dimension { .. } | Error::Io(_) => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}
