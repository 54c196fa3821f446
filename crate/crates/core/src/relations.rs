//! Numerical verification of commutation relations, coproduct formulas, the bridge to the
//! Zakrzewski presentation and the classical Hopf structure.
//!
//! Operators act on complex functions of groupoid points. A Lie derivative along the
//! right-invariant field of ċ is evaluated by central differences along the bisection flow,
//! with the factor ι included, so that the self-adjoint generator of ċ is
//! `Sum[LieDeriv(ċ), Scalar(ι·Tr(ad ċ|𝔠)/2)]`.

use crate::decomp::{b_r, ca_project, factor_cb, B_PRIME_GUARD};
use crate::error::{Error, Result};
use crate::groupoid::{gamma_a_iso, gamma_a_iso_inv, AGroupoidPoint, GroupoidPoint};
use crate::groups::{
    c_inv, embed_a, embed_b, gaussian_vec, recover_a, recover_b, sample_a, sample_b, sample_c, stream_rng,
    AParam, BParam, CParam,
};
use crate::infgen::{
    ad_c, ad_ctilde, anchor, anchor_a, bisection_image, c_coords, c_element, c_exp, flow_a, flow_g, l_of_b,
    central_diff, right_velocity, tr_ad_c, w_matrix, w_of_b, Coproduct,
};
use crate::minkalg::{bracket, c_basis, mat_exp, GroupMatrix};
use crate::report::Residual;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::fmt;
use std::sync::Arc;

pub const I: Complex64 = Complex64::new(0.0, 1.0);

/// A point of G_B or of Γ_A in chart form.
#[derive(Debug, Clone, PartialEq)]
pub enum Point {
    G(GroupoidPoint),
    A(AGroupoidPoint),
}

impl Point {
    pub fn n(&self) -> usize {
        match self {
            Point::G(g) => g.n(),
            Point::A(p) => p.a.n(),
        }
    }

    /// The flow of the bisections B·exp(tċ) (resp. their Γ_A counterpart).
    pub fn flow(&self, cdot: &DVector<f64>, t: f64) -> Result<Point> {
        Ok(match self {
            Point::G(g) => Point::G(flow_g(cdot, t, g)?),
            Point::A(p) => Point::A(flow_a(cdot, t, p)?),
        })
    }

    pub fn matrix(&self) -> GroupMatrix {
        match self {
            Point::G(g) => g.matrix(),
            Point::A(p) => p.matrix(),
        }
    }

    /// Chart coordinates: (Λ, u, w, α, log s, y) on G_B and (z, U, log s, y) on Γ_A.
    pub fn coords(&self) -> DVector<f64> {
        let mut v = Vec::new();
        let c = match self {
            Point::G(g) => {
                v.extend(g.b.lam.iter());
                v.extend(g.b.u.iter());
                v.extend(g.b.w.iter());
                v.push(g.b.alpha);
                &g.c
            }
            Point::A(p) => {
                v.extend(p.a.z.iter());
                v.extend(p.a.u.iter());
                &p.c
            }
        };
        v.push(c.s.ln());
        v.extend(c.y.iter());
        DVector::from_vec(v)
    }

    /// The left base point as an element of B (through b_R on Γ_A).
    pub fn base_b(&self) -> Result<BParam> {
        match self {
            Point::G(g) => Ok(g.b.clone()),
            Point::A(p) => Ok(crate::decomp::a_factor(&p.a).b),
        }
    }

    /// The left base point as an element of A (through a_R on G_B).
    pub fn base_a(&self) -> Result<AParam> {
        match self {
            Point::G(g) => Ok(ca_project(&g.b)?.a),
            Point::A(p) => Ok(p.a.clone()),
        }
    }

    /// L = ηWη at the left base point.
    pub fn l_matrix(&self) -> Result<DMatrix<f64>> {
        match self {
            Point::G(g) => l_of_b(&g.b),
            Point::A(p) => Ok(eta_conj(&w_matrix(&p.a))),
        }
    }
}

/// ηMη for η = diag(1, −1, …, −1).
pub fn eta_conj(m: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = m.clone();
    for k in 1..m.nrows() {
        out[(0, k)] = -out[(0, k)];
        out[(k, 0)] = -out[(k, 0)];
    }
    out
}

/// sgn(γ) = η_γγ.
pub fn eta_sign(g: usize) -> f64 {
    if g == 0 {
        1.0
    } else {
        -1.0
    }
}

fn delta(a: usize, b: usize) -> f64 {
    if a == b {
        1.0
    } else {
        0.0
    }
}

type PointFn = Arc<dyn Fn(&Point) -> Result<f64> + Send + Sync>;

/// A real coordinate function on the left base point.
#[derive(Clone)]
pub enum CoordFn {
    Lam(usize, usize),
    U(usize),
    W(usize),
    Alpha,
    SgnAlpha,
    InvAlpha,
    InvAbsAlpha,
    L(usize, usize),
    WEntry(usize, usize),
    AdC(usize, usize),
    Z(usize),
    UA(usize, usize),
    Custom(String, PointFn),
}

impl fmt::Debug for CoordFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CoordFn::Lam(k, l) => write!(f, "Lam{k}{l}"),
            CoordFn::U(k) => write!(f, "u{k}"),
            CoordFn::W(k) => write!(f, "w{k}"),
            CoordFn::Alpha => write!(f, "alpha"),
            CoordFn::SgnAlpha => write!(f, "sgn(alpha)"),
            CoordFn::InvAlpha => write!(f, "1/alpha"),
            CoordFn::InvAbsAlpha => write!(f, "1/|alpha|"),
            CoordFn::L(a, b) => write!(f, "L{a}{b}"),
            CoordFn::WEntry(a, b) => write!(f, "W{a}{b}"),
            CoordFn::AdC(a, b) => write!(f, "AdC{a}{b}"),
            CoordFn::Z(k) => write!(f, "z{k}"),
            CoordFn::UA(k, l) => write!(f, "U{k}{l}"),
            CoordFn::Custom(name, _) => write!(f, "{name}"),
        }
    }
}

impl CoordFn {
    pub fn eval(&self, p: &Point) -> Result<f64> {
        let alpha_guard = |b: &BParam| {
            if b.alpha.abs() < B_PRIME_GUARD {
                Err(Error::Domain("function needs alpha != 0".into()))
            } else {
                Ok(b.alpha)
            }
        };
        Ok(match self {
            CoordFn::Lam(k, l) => p.base_b()?.lam[(*k, *l)],
            CoordFn::U(k) => p.base_b()?.u[*k],
            CoordFn::W(k) => p.base_b()?.w[*k],
            CoordFn::Alpha => p.base_b()?.alpha,
            CoordFn::SgnAlpha => alpha_guard(&p.base_b()?)?.signum(),
            CoordFn::InvAlpha => 1.0 / alpha_guard(&p.base_b()?)?,
            CoordFn::InvAbsAlpha => 1.0 / alpha_guard(&p.base_b()?)?.abs(),
            CoordFn::L(a, b) => p.l_matrix()?[(*a, *b)],
            CoordFn::WEntry(a, b) => eta_conj(&p.l_matrix()?)[(*a, *b)],
            CoordFn::AdC(a, b) => ad_c(&embed_b(&p.base_b()?))[(*a, *b)],
            CoordFn::Z(k) => p.base_a()?.z[*k],
            CoordFn::UA(k, l) => p.base_a()?.u[(*k, *l)],
            CoordFn::Custom(_, f) => f(p)?,
        })
    }
}

/// Operator expression tree, evaluated right to left on a function argument.
#[derive(Debug, Clone)]
pub enum SymbolOp {
    /// ι·X^r_ċ by a central difference along the flow.
    LieDeriv(DVector<f64>),
    MultByFn(CoordFn),
    Sum(Vec<SymbolOp>),
    /// Composition: `Product([A, B])` applied to f is A(B(f)).
    Product(Vec<SymbolOp>),
    Scalar(Complex64),
}

pub type Func<'a> = dyn Fn(&Point) -> Result<Complex64> + Sync + 'a;

fn apply_seq(ops: &[SymbolOp], f: &Func, p: &Point, h: f64) -> Result<Complex64> {
    match ops.split_first() {
        None => f(p),
        Some((first, rest)) => first.apply(&|q: &Point| apply_seq(rest, f, q, h), p, h),
    }
}

impl SymbolOp {
    pub fn identity() -> Self {
        SymbolOp::Product(vec![])
    }

    pub fn mult(f: CoordFn) -> Self {
        SymbolOp::MultByFn(f)
    }

    /// A_ċ = ι(X^r_ċ + ½Tr(ad ċ|𝔠)).
    pub fn generator(cdot: &DVector<f64>) -> Self {
        let tr = tr_ad_c(cdot.len() - 1).dot(cdot);
        SymbolOp::Sum(vec![
            SymbolOp::LieDeriv(cdot.clone()),
            SymbolOp::Scalar(I * (0.5 * tr)),
        ])
    }

    /// Ŷ_β = A_{ċ_β}, with Ŷ₀ = Ŝ.
    pub fn y_hat(n: usize, beta: usize) -> Self {
        SymbolOp::generator(&unit(n + 1, beta))
    }

    pub fn scaled(z: Complex64, op: SymbolOp) -> Self {
        SymbolOp::Product(vec![SymbolOp::Scalar(z), op])
    }

    pub fn compose(a: SymbolOp, b: SymbolOp) -> Self {
        SymbolOp::Product(vec![a, b])
    }

    /// [A, B] = AB − BA.
    pub fn comm(a: SymbolOp, b: SymbolOp) -> Self {
        SymbolOp::Sum(vec![
            SymbolOp::Product(vec![a.clone(), b.clone()]),
            SymbolOp::Product(vec![SymbolOp::Scalar(Complex64::new(-1.0, 0.0)), b, a]),
        ])
    }

    /// a_α = −½Σ_β(L_{αβ}Ŷ_β + Ŷ_βL_{αβ}).
    pub fn zak_a(n: usize, alpha: usize) -> Self {
        let mut terms = Vec::new();
        for beta in 0..=n {
            let l = SymbolOp::mult(CoordFn::L(alpha, beta));
            let y = SymbolOp::y_hat(n, beta);
            terms.push(SymbolOp::compose(l.clone(), y.clone()));
            terms.push(SymbolOp::compose(y, l));
        }
        SymbolOp::scaled(Complex64::new(-0.5, 0.0), SymbolOp::Sum(terms))
    }

    pub fn apply(&self, f: &Func, p: &Point, h: f64) -> Result<Complex64> {
        match self {
            SymbolOp::LieDeriv(c) => Ok(I * central_diff(h, |t| f(&p.flow(c, t)?))?),
            SymbolOp::MultByFn(g) => Ok(f(p)? * g.eval(p)?),
            SymbolOp::Scalar(z) => Ok(*z * f(p)?),
            SymbolOp::Sum(ops) => {
                let mut acc = Complex64::new(0.0, 0.0);
                for op in ops {
                    acc += op.apply(f, p, h)?;
                }
                Ok(acc)
            }
            SymbolOp::Product(ops) => apply_seq(ops, f, p, h),
        }
    }

    /// Copy with every trace constant removed.
    pub fn without_trace(&self) -> Self {
        match self {
            SymbolOp::Sum(ops) => SymbolOp::Sum(
                ops.iter()
                    .filter(|o| !matches!(o, SymbolOp::Scalar(z) if z.re == 0.0 && z.im != 0.0))
                    .map(|o| o.without_trace())
                    .collect(),
            ),
            SymbolOp::Product(ops) => SymbolOp::Product(ops.iter().map(|o| o.without_trace()).collect()),
            other => other.clone(),
        }
    }
}

pub fn unit(len: usize, k: usize) -> DVector<f64> {
    let mut v = DVector::zeros(len);
    v[k] = 1.0;
    v
}

/// Gaussian bump in chart coordinates times a polynomial of degree ≤ 2.
#[derive(Debug, Clone, PartialEq)]
pub struct TestFn {
    pub center: DVector<f64>,
    pub width: f64,
    pub lin: DVector<f64>,
    pub quad: DMatrix<f64>,
}

impl TestFn {
    pub fn random(rng: &mut ChaCha8Rng, near: &DVector<f64>) -> Self {
        let d = near.len();
        let center = near + gaussian_vec(rng, d) * 0.2;
        let lin = gaussian_vec(rng, d) * 0.7;
        let g = DMatrix::from_fn(d, d, |_, _| rng.sample::<f64, _>(rand_distr::StandardNormal) * 0.4);
        TestFn {
            center,
            width: rng.random_range(0.8..1.6),
            lin,
            quad: (&g + g.transpose()) * 0.5,
        }
    }

    pub fn eval_coords(&self, x: &DVector<f64>) -> f64 {
        let dx = x - &self.center;
        let g = (-dx.norm_squared() / (2.0 * self.width * self.width)).exp();
        g * (1.0 + self.lin.dot(&dx) + dx.dot(&(&self.quad * &dx)))
    }

    pub fn eval(&self, p: &Point) -> Result<Complex64> {
        Ok(Complex64::new(self.eval_coords(&p.coords()), 0.0))
    }
}

pub fn test_family(rng: &mut ChaCha8Rng, p: &Point, count: usize) -> Vec<TestFn> {
    let c = p.coords();
    (0..count).map(|_| TestFn::random(rng, &c)).collect()
}

/// A point of G_B with |α| ≥ guard.
pub fn sample_g_point(rng: &mut ChaCha8Rng, n: usize, guard: f64) -> GroupoidPoint {
    loop {
        let b = sample_b(rng, n);
        let c = sample_c(rng, n);
        if b.alpha.abs() >= guard {
            return GroupoidPoint::new(b, c);
        }
    }
}

pub fn sample_a_point(rng: &mut ChaCha8Rng, n: usize) -> AGroupoidPoint {
    AGroupoidPoint {
        a: sample_a(rng, n),
        c: sample_c(rng, n),
    }
}

/// Maximum of f over 0..count in parallel; errors propagate, NaN counts as +∞.
pub fn par_max<F>(count: usize, f: F) -> Result<f64>
where
    F: Fn(usize) -> Result<f64> + Sync + Send,
{
    let vals: Vec<Result<f64>> = (0..count).into_par_iter().map(f).collect();
    let mut m = 0.0f64;
    for v in vals {
        let v = v?;
        m = if v.is_nan() { f64::INFINITY } else { m.max(v) };
    }
    Ok(m)
}

/// |op·f(p) − g(p)·f(p)|, with g a closed-form function.
fn op_vs_fn(op: &SymbolOp, g: f64, f: &TestFn, p: &Point, h: f64) -> Result<f64> {
    let lhs = op.apply(&|q: &Point| f.eval(q), p, h)?;
    Ok((lhs - I * g * f.eval(p)?).norm())
}

/// ι·d/dt Q along the flow of ċ at b, from the closed-form flows: the ċ₀ part from the
/// S(t) formulas and the (ċ_m) part from the Y₀(t) formulas.
pub fn flow_derivative_closed(q: &CoordFn, cdot: &DVector<f64>, b: &BParam) -> Result<f64> {
    let n = b.n();
    let v0 = cdot[0];
    let y0 = cdot.rows(1, n).into_owned();
    let a = b.alpha;
    let wy = b.w.dot(&y0);
    let ly = &b.lam * &y0;
    Ok(match q {
        CoordFn::Lam(k, l) => {
            -v0 * b.u[*k] * b.w[*l] - (b.u[*k] * y0[*l] + ly[*k] * b.w[*l])
        }
        CoordFn::U(k) => -v0 * a * b.u[*k] + (1.0 - a) * ly[*k],
        CoordFn::W(k) => -v0 * a * b.w[*k] + (1.0 - a) * y0[*k] - wy * b.w[*k],
        CoordFn::Alpha => v0 * (1.0 - a * a) + (1.0 - a) * wy,
        _ => return Err(Error::Domain(format!("no closed form for {q:?}"))),
    })
}

fn b_coordinate_fns(n: usize) -> Vec<CoordFn> {
    let mut v = vec![CoordFn::Alpha];
    for k in 0..n {
        v.push(CoordFn::U(k));
        v.push(CoordFn::W(k));
        for l in 0..n {
            v.push(CoordFn::Lam(k, l));
        }
    }
    v
}

fn a_coordinate_fns(n: usize) -> Vec<CoordFn> {
    let mut v = Vec::new();
    for k in 0..n {
        v.push(CoordFn::Z(k));
        for l in 0..n {
            v.push(CoordFn::UA(k, l));
        }
    }
    for a in 0..=n {
        for b in 0..=n {
            v.push(CoordFn::L(a, b));
        }
    }
    v
}

/// Shared sample setup for the operator checks.
#[derive(Debug, Clone, Copy)]
pub struct OpCheck {
    pub n: usize,
    pub seed: u64,
    pub samples: usize,
    pub funcs: usize,
    pub h: f64,
    pub h_composed: f64,
    pub tol_fd: f64,
    pub tol_composed: f64,
    pub tol_exact: f64,
}

impl OpCheck {
    pub fn new(n: usize, seed: u64, samples: usize) -> Self {
        OpCheck {
            n,
            seed,
            samples,
            funcs: 5,
            h: 1e-5,
            h_composed: 1e-4,
            tol_fd: 1e-6,
            tol_composed: 1e-4,
            tol_exact: 1e-9,
        }
    }

    pub fn rng(&self, tag: u64, i: usize) -> ChaCha8Rng {
        stream_rng(self.seed ^ (tag << 32) ^ (self.n as u64) << 56, i as u64)
    }

    fn count(&self) -> usize {
        self.samples * self.funcs
    }
}

/// Commutators of Ŝ and Ŷ_k with coordinate functions, the closed-form flows, the anchor
/// commutators and their Γ_A counterparts.
pub fn check_flow_commutators(cfg: &OpCheck) -> Result<Vec<Residual>> {
    let n = cfg.n;
    let h = cfg.h;
    let qs = b_coordinate_fns(n);
    let comm_family = |tag: u64, make_cdot: &(dyn Fn(&mut ChaCha8Rng) -> DVector<f64> + Sync)| {
        par_max(cfg.samples, |i| {
            let mut rng = cfg.rng(tag, i);
            let p = Point::G(sample_g_point(&mut rng, n, 0.0));
            let cdot = make_cdot(&mut rng);
            let fs = test_family(&mut rng, &p, cfg.funcs);
            let b = p.base_b()?;
            let gen = SymbolOp::generator(&cdot);
            let mut m = 0.0f64;
            for q in &qs {
                let op = SymbolOp::comm(gen.clone(), SymbolOp::mult(q.clone()));
                let rhs = flow_derivative_closed(q, &cdot, &b)?;
                for f in &fs {
                    m = m.max(op_vs_fn(&op, rhs, f, &p, h)?);
                }
            }
            Ok(m)
        })
    };
    let mut out = Vec::new();
    let r = comm_family(1, &|_| unit(n + 1, 0))?;
    out.push(Residual::new("s_hat_commutators", r, cfg.count(), Some(h), cfg.tol_fd));
    let r = comm_family(2, &|rng| {
        let mut v = gaussian_vec(rng, n + 1);
        v[0] = 0.0;
        v
    })?;
    out.push(Residual::new("y0_hat_commutators", r, cfg.count(), Some(h), cfg.tol_fd));
    let r = par_max(n, |m| {
        let cfg_m = OpCheck {
            samples: cfg.samples.div_ceil(n),
            seed: cfg.seed + m as u64,
            ..*cfg
        };
        let qs = b_coordinate_fns(n);
        par_max(cfg_m.samples, |i| {
            let mut rng = cfg_m.rng(3, i);
            let p = Point::G(sample_g_point(&mut rng, n, 0.0));
            let fs = test_family(&mut rng, &p, cfg.funcs);
            let b = p.base_b()?;
            let gen = SymbolOp::y_hat(n, m + 1);
            let mut worst = 0.0f64;
            for q in &qs {
                let rhs = match q {
                    CoordFn::Lam(k, l) => -(b.u[*k] * delta(m, *l) + b.lam[(*k, m)] * b.w[*l]),
                    CoordFn::Alpha => (1.0 - b.alpha) * b.w[m],
                    CoordFn::W(k) => (1.0 - b.alpha) * delta(m, *k) - b.w[m] * b.w[*k],
                    CoordFn::U(k) => (1.0 - b.alpha) * b.lam[(*k, m)],
                    _ => unreachable!(),
                };
                let op = SymbolOp::comm(gen.clone(), SymbolOp::mult(q.clone()));
                for f in &fs {
                    worst = worst.max(op_vs_fn(&op, rhs, f, &p, h)?);
                }
            }
            Ok(worst)
        })
    })?;
    out.push(Residual::new("ym_hat_commutators", r, cfg.count(), Some(h), cfg.tol_fd));

    let r = par_max(cfg.samples, |i| {
        let mut rng = cfg.rng(4, i);
        let p = Point::G(sample_g_point(&mut rng, n, 0.0));
        let cdot = gaussian_vec(&mut rng, n + 1);
        let fs = test_family(&mut rng, &p, cfg.funcs);
        let gen = SymbolOp::generator(&cdot);
        let mut m = 0.0f64;
        for q in &qs {
            let with = SymbolOp::comm(gen.clone(), SymbolOp::mult(q.clone()));
            let without = with.without_trace();
            for f in &fs {
                let a = with.apply(&|x: &Point| f.eval(x), &p, h)?;
                let b = without.apply(&|x: &Point| f.eval(x), &p, h)?;
                m = m.max((a - b).norm());
            }
        }
        Ok(m)
    })?;
    out.push(Residual::new("trace_constant_cancellation", r, cfg.count(), Some(h), 1e-10));

    let r = par_max(cfg.samples, |i| {
        let mut rng = cfg.rng(5, i);
        let b = sample_b(&mut rng, n);
        let mut m = 0.0f64;
        for _ in 0..4 {
            let t: f64 = rng.random_range(-1.0..1.0);
            let bt = b_r(&b, &CParam::new(t.exp(), DVector::zeros(n))?)?;
            let den = t.cosh() + b.alpha * t.sinh();
            let expect = BParam {
                lam: &b.lam - &b.u * b.w.transpose() * (t.sinh() / den),
                u: &b.u / den,
                w: &b.w / den,
                alpha: (b.alpha * t.cosh() + t.sinh()) / den,
            };
            m = m.max(bt.dist(&expect));
        }
        Ok(m)
    })?;
    out.push(Residual::new("flow_closed_form_S", r, 4 * cfg.samples, None, cfg.tol_exact));

    let r = par_max(cfg.samples, |i| {
        let mut rng = cfg.rng(6, i);
        let b = sample_b(&mut rng, n);
        let y0 = gaussian_vec(&mut rng, n);
        let mut m = 0.0f64;
        for _ in 0..4 {
            let t: f64 = rng.random_range(-1.0..1.0);
            let bt = b_r(&b, &CParam::new(1.0, &y0 * (-t))?)?;
            let a = b.alpha;
            let wy = b.w.dot(&y0);
            let mt = y0.norm_squared() / 2.0 * (1.0 - a) * t * t + t * wy + 1.0;
            let ly = &b.lam * &y0;
            let expect = BParam {
                lam: &b.lam + &b.u * b.w.transpose() * (t * t * y0.norm_squared() / (2.0 * mt))
                    - &b.u * y0.transpose() * (t * (1.0 + t * wy) / mt)
                    - &ly * b.w.transpose() * (t / mt)
                    - &ly * y0.transpose() * (t * t * (1.0 - a) / mt),
                u: (&b.u + (&b.u * wy + &ly * (1.0 - a)) * t) / mt,
                w: (&b.w + &y0 * (t * (1.0 - a))) / mt,
                alpha: 1.0 - (1.0 - a) / mt,
            };
            m = m.max(bt.dist(&expect));
        }
        Ok(m)
    })?;
    out.push(Residual::new("flow_closed_form_Y0", r, 4 * cfg.samples, None, cfg.tol_exact));

    // [A_ċ, f] = ι Π(X^r_ċ) f, with Π from the projected adjoint action.
    let r = par_max(cfg.samples, |i| {
        let mut rng = cfg.rng(7, i);
        let g = sample_g_point(&mut rng, n, 0.0);
        let p = Point::G(g.clone());
        let cdot = gaussian_vec(&mut rng, n + 1);
        let fs = test_family(&mut rng, &p, cfg.funcs);
        let xi = anchor(&cdot, &g.b);
        let gen = SymbolOp::generator(&cdot);
        let mut m = 0.0f64;
        for q in &qs {
            let along = |t: f64| -> Result<f64> {
                let bt = recover_b(&mat_exp(&xi.scale(t)).mul(&embed_b(&g.b)))?;
                q.eval(&Point::G(GroupoidPoint::new(bt, g.c.clone())))
            };
            let d = central_diff(h, &along)?;
            let op = SymbolOp::comm(gen.clone(), SymbolOp::mult(q.clone()));
            for f in &fs {
                m = m.max(op_vs_fn(&op, d, f, &p, h)?);
            }
        }
        Ok(m)
    })?;
    out.push(Residual::new("anchor_commutators", r, cfg.count(), Some(h), cfg.tol_fd));

    // The same on Γ_A.
    let aqs = a_coordinate_fns(n);
    let r = par_max(cfg.samples, |i| {
        let mut rng = cfg.rng(8, i);
        let pa = sample_a_point(&mut rng, n);
        let p = Point::A(pa.clone());
        let cdot = gaussian_vec(&mut rng, n + 1);
        let fs = test_family(&mut rng, &p, cfg.funcs);
        let xi = anchor_a(&cdot, &pa.a);
        let gen = SymbolOp::generator(&cdot);
        let mut m = 0.0f64;
        for q in &aqs {
            let along = |t: f64| -> Result<f64> {
                let at = recover_a(&mat_exp(&xi.scale(t)).mul(&embed_a(&pa.a)))?;
                q.eval(&Point::A(AGroupoidPoint { a: at, c: pa.c.clone() }))
            };
            let d = central_diff(h, &along)?;
            let op = SymbolOp::comm(gen.clone(), SymbolOp::mult(q.clone()));
            for f in &fs {
                m = m.max(op_vs_fn(&op, d, f, &p, h)?);
            }
        }
        Ok(m)
    })?;
    out.push(Residual::new("gamma_a_anchor_commutators", r, cfg.count(), Some(h), cfg.tol_fd));

    let hc = cfg.h_composed;
    let r = par_max(cfg.samples, |i| {
        let mut rng = cfg.rng(9, i);
        let p = Point::A(sample_a_point(&mut rng, n));
        let (c1, c2) = (gaussian_vec(&mut rng, n + 1), gaussian_vec(&mut rng, n + 1));
        let fs = test_family(&mut rng, &p, cfg.funcs);
        bracket_residual(&p, &c1, &c2, &fs, hc)
    })?;
    out.push(Residual::new("gamma_a_generator_brackets", r, cfg.count(), Some(hc), cfg.tol_composed));
    Ok(out)
}

/// 𝔠-coordinates of [ċ, ė].
pub fn c_bracket(c1: &DVector<f64>, c2: &DVector<f64>) -> DVector<f64> {
    let n = c1.len() - 1;
    let x = c_element(n, c1);
    let y = c_element(n, c2);
    c_coords(n, &bracket(&x, &y).expect("same n").matrix)
}

/// |[A_ċ, A_ė]f + ιA_{[ċ,ė]}f| maximized over the test functions.
fn bracket_residual(p: &Point, c1: &DVector<f64>, c2: &DVector<f64>, fs: &[TestFn], h: f64) -> Result<f64> {
    let lhs = SymbolOp::comm(SymbolOp::generator(c1), SymbolOp::generator(c2));
    let rhs = SymbolOp::scaled(-I, SymbolOp::generator(&c_bracket(c1, c2)));
    let mut m = 0.0f64;
    for f in fs {
        let ff = |q: &Point| f.eval(q);
        m = m.max((lhs.apply(&ff, p, h)? - rhs.apply(&ff, p, h)?).norm());
    }
    Ok(m)
}

/// [A_ċ₁, A_ċ₂] = ιA_[ċ₁,ċ₂] for random pairs, its basis form for Ŝ and Ŷ_k, and the bracket table of 𝔠.
pub fn check_generator_brackets(cfg: &OpCheck) -> Result<Vec<Residual>> {
    let n = cfg.n;
    let hc = cfg.h_composed;
    let mut out = Vec::new();
    let cb = c_basis(n);
    let mut m = 0.0f64;
    for k in 1..=n {
        let br = bracket(&cb[0], &cb[k])?;
        m = m.max((&br.matrix - &cb[k].matrix).amax());
        for l in 1..=n {
            m = m.max(bracket(&cb[k], &cb[l])?.matrix.amax());
        }
    }
    out.push(Residual::new("c_bracket_table", m, n * (n + 1), None, 1e-12));

    let r = par_max(cfg.samples, |i| {
        let mut rng = cfg.rng(20, i);
        let p = Point::G(sample_g_point(&mut rng, n, 0.0));
        let (c1, c2) = (gaussian_vec(&mut rng, n + 1), gaussian_vec(&mut rng, n + 1));
        let fs = test_family(&mut rng, &p, cfg.funcs);
        bracket_residual(&p, &c1, &c2, &fs, hc)
    })?;
    out.push(Residual::new("generator_brackets", r, cfg.count(), Some(hc), cfg.tol_composed));

    let r = par_max(cfg.samples, |i| {
        let mut rng = cfg.rng(21, i);
        let p = Point::G(sample_g_point(&mut rng, n, 0.0));
        let fs = test_family(&mut rng, &p, cfg.funcs);
        let mut m = 0.0f64;
        for k in 1..=n {
            let lhs = SymbolOp::comm(SymbolOp::y_hat(n, 0), SymbolOp::y_hat(n, k));
            let rhs = SymbolOp::scaled(-I, SymbolOp::y_hat(n, k));
            for f in &fs {
                let ff = |q: &Point| f.eval(q);
                m = m.max((lhs.apply(&ff, &p, hc)? - rhs.apply(&ff, &p, hc)?).norm());
            }
            for l in (k + 1)..=n {
                let c = SymbolOp::comm(SymbolOp::y_hat(n, k), SymbolOp::y_hat(n, l));
                for f in &fs {
                    m = m.max(c.apply(&|q: &Point| f.eval(q), &p, hc)?.norm());
                }
            }
        }
        Ok(m)
    })?;
    out.push(Residual::new("s_y_brackets", r, cfg.count(), Some(hc), cfg.tol_composed));
    Ok(out)
}

/// Coordinate functions on B.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BFn {
    Lam(usize, usize),
    U(usize),
    W(usize),
    Alpha,
}

impl BFn {
    pub fn eval(&self, b: &BParam) -> f64 {
        match *self {
            BFn::Lam(k, l) => b.lam[(k, l)],
            BFn::U(k) => b.u[k],
            BFn::W(k) => b.w[k],
            BFn::Alpha => b.alpha,
        }
    }

    pub fn all(n: usize) -> Vec<BFn> {
        let mut v = vec![BFn::Alpha];
        for k in 0..n {
            v.push(BFn::U(k));
            v.push(BFn::W(k));
            for l in 0..n {
                v.push(BFn::Lam(k, l));
            }
        }
        v
    }
}

/// b_R(b₁·a_R(b₂)), the product on B × B′ behind the coproduct.
pub fn twisted_product(b1: &BParam, b2: &BParam) -> Result<BParam> {
    let a2 = ca_project(b2)?.a;
    Ok(factor_cb(&embed_b(b1).mul(&embed_a(&a2)))?.b)
}

/// The second form b_R(b₁·c̃_L(b₂)⁻¹)·b₂.
pub fn twisted_product_alt(b1: &BParam, b2: &BParam) -> Result<BParam> {
    let ct = ca_project(b2)?.c;
    Ok(b_r(b1, &c_inv(&ct))?.mul(b2))
}

/// (Δf)(b₁, b₂) = f(b_R(b₁ a_R(b₂))).
pub fn coproduct_fn(f: BFn, b1: &BParam, b2: &BParam) -> Result<f64> {
    Ok(f.eval(&twisted_product(b1, b2)?))
}

/// The closed forms for Δ(u_k), Δ(w_k), Δ(α), Δ(Λ_kl) with P = 1 − Σ w_k ⊗ sgn(α)u_k.
pub fn coproduct_closed(f: BFn, b1: &BParam, b2: &BParam) -> Result<f64> {
    if b2.alpha.abs() < B_PRIME_GUARD {
        return Err(Error::Domain("b2 not in B'".into()));
    }
    let n = b1.n();
    let sg = b2.sgn_alpha();
    let p = 1.0 - sg * b1.w.dot(&b2.u);
    Ok(match f {
        BFn::U(k) => b1.u[k] * sg + (0..n).map(|l| b1.alpha * b1.lam[(k, l)] * b2.u[l]).sum::<f64>() / p,
        BFn::W(k) => b2.w[k] + (0..n).map(|l| b1.w[l] * b2.alpha.abs() * b2.lam[(l, k)]).sum::<f64>() / p,
        BFn::Alpha => b1.alpha * b2.alpha / p,
        BFn::Lam(k, l) => {
            let mut s = 0.0;
            for j in 0..n {
                s += b1.lam[(k, j)] * b2.lam[(j, l)];
            }
            let mut t = 0.0;
            for m in 0..n {
                for j in 0..n {
                    t += b1.lam[(k, m)] * b1.w[j] * sg * b2.u[m] * b2.lam[(j, l)];
                }
            }
            s + t / p
        }
    })
}

/// Δ₀(f)(b₁, b₂) = f(b₁b₂), with the product taken in the (n+2)-dimensional representation.
pub fn coproduct0_fn(f: BFn, b1: &BParam, b2: &BParam) -> Result<f64> {
    Ok(f.eval(&recover_b(&embed_b(b1).mul(&embed_b(b2)))?))
}

/// Δ₀ of the coordinate functions from the block product [[Λ, u], [wᵗ, α]].
pub fn coproduct0_closed(f: BFn, b1: &BParam, b2: &BParam) -> f64 {
    let n = b1.n();
    match f {
        BFn::Lam(k, l) => (0..n).map(|j| b1.lam[(k, j)] * b2.lam[(j, l)]).sum::<f64>() + b1.u[k] * b2.w[l],
        BFn::U(k) => (0..n).map(|j| b1.lam[(k, j)] * b2.u[j]).sum::<f64>() + b1.u[k] * b2.alpha,
        BFn::W(k) => (0..n).map(|j| b1.w[j] * b2.lam[(j, k)]).sum::<f64>() + b1.alpha * b2.w[k],
        BFn::Alpha => b1.w.dot(&b2.u) + b1.alpha * b2.alpha,
    }
}

/// The coproduct pullback against its closed forms, the Δ₀ coordinate formulas and coassociativity.
pub fn check_coproduct_fns(cfg: &OpCheck) -> Result<Vec<Residual>> {
    let n = cfg.n;
    let fs = BFn::all(n);
    let mut out = Vec::new();
    let r = par_max(cfg.samples, |i| {
        let mut rng = cfg.rng(30, i);
        let b1 = sample_b(&mut rng, n);
        let b2 = sample_g_point(&mut rng, n, 0.05).b;
        let mut m = (twisted_product(&b1, &b2)?).dist(&twisted_product_alt(&b1, &b2)?);
        for f in &fs {
            m = m.max((coproduct_fn(*f, &b1, &b2)? - coproduct_closed(*f, &b1, &b2)?).abs());
        }
        Ok(m)
    })?;
    out.push(Residual::new("coproduct_closed_forms", r, cfg.samples, None, cfg.tol_exact));
    let r = par_max(cfg.samples, |i| {
        let mut rng = cfg.rng(31, i);
        let b1 = sample_b(&mut rng, n);
        let b2 = sample_b(&mut rng, n);
        let mut m = 0.0f64;
        for f in &fs {
            m = m.max((coproduct0_fn(*f, &b1, &b2)? - coproduct0_closed(*f, &b1, &b2)).abs());
        }
        Ok(m)
    })?;
    out.push(Residual::new("delta0_on_coordinates", r, cfg.samples, None, cfg.tol_exact));
    let r = par_max(cfg.samples, |i| {
        let mut rng = cfg.rng(32, i);
        let b1 = sample_b(&mut rng, n);
        loop {
            let b2 = sample_g_point(&mut rng, n, 0.05).b;
            let b3 = sample_g_point(&mut rng, n, 0.05).b;
            let b23 = twisted_product(&b2, &b3)?;
            if b23.alpha.abs() < 0.05 {
                continue;
            }
            let left = twisted_product(&twisted_product(&b1, &b2)?, &b3)?;
            let right = twisted_product(&b1, &b23)?;
            return Ok(left.dist(&right));
        }
    })?;
    out.push(Residual::new("coproduct_coassociativity", r, cfg.samples, None, cfg.tol_exact));
    Ok(out)
}

/// Velocities (ξ₁, ξ₂) at t = 0 of the pair flow t ↦ image of (g₁, g₂) under the bisection exp(tċ_α).
fn pair_velocity(
    which: Coproduct,
    cdot: &DVector<f64>,
    g1: &GroupoidPoint,
    g2: &GroupoidPoint,
    h: f64,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let img = |t: f64| bisection_image(&c_exp(&(cdot * t)), which, g1, g2);
    let v1 = right_velocity(h, &g1.matrix(), |t| Ok(img(t)?.0.matrix()))?;
    let v2 = right_velocity(h, &g2.matrix(), |t| Ok(img(t)?.1.matrix()))?;
    Ok((v1, v2))
}

/// The Δ₀ and Δ vector fields on G_B × G_B, the entries of W and the Γ_A form of Δ.
pub fn check_coproduct_generators(cfg: &OpCheck) -> Result<Vec<Residual>> {
    let n = cfg.n;
    let h = cfg.h;
    let mut out = Vec::new();
    for (tag, which, name) in [
        (40u64, Coproduct::Delta0, "delta0_vector_field"),
        (41, Coproduct::Delta, "delta_vector_field"),
    ] {
        let r = par_max(cfg.samples, |i| {
            let mut rng = cfg.rng(tag, i);
            let g1 = sample_g_point(&mut rng, n, 0.0);
            let g2 = sample_g_point(&mut rng, n, 0.05);
            let m2 = match which {
                Coproduct::Delta0 => ad_c(&embed_b(&g2.b)),
                Coproduct::Delta => w_of_b(&g2.b)?,
            };
            let a1 = ad_c(&embed_b(&g1.b));
            let a2 = ad_c(&embed_b(&g2.b));
            let mut m = 0.0f64;
            for al in 0..=n {
                let e = unit(n + 1, al);
                let (v1, v2) = pair_velocity(which, &e, &g1, &g2, h)?;
                let x1 = c_element(n, &(&a1 * (&m2 * &e))).matrix;
                let x2 = c_element(n, &(&a2 * &e)).matrix;
                m = m.max((v1 - x1).amax()).max((v2 - x2).amax());
            }
            Ok(m)
        })?;
        out.push(Residual::new(name, r, cfg.samples * (n + 1), Some(h), cfg.tol_fd));
    }

    let r = par_max(cfg.samples, |i| {
        let mut rng = cfg.rng(42, i);
        let b = sample_g_point(&mut rng, n, 0.05).b;
        let a = ca_project(&b)?.a;
        let w = w_of_b(&b)?;
        Ok((&w - ad_ctilde(&embed_a(&a))).amax().max((&w - w_matrix(&a)).amax()))
    })?;
    out.push(Residual::new("w_matrix_entries", r, cfg.samples, None, cfg.tol_exact));

    // Δ₀ and Δ applied to product test functions f₁ ⊗ f₂, at vector-field level.
    for (tag, which, name) in [
        (43u64, Coproduct::Delta0, "delta0_on_test_functions"),
        (44, Coproduct::Delta, "delta_on_test_functions"),
    ] {
        let r = par_max(cfg.samples, |i| {
            let mut rng = cfg.rng(tag, i);
            let g1 = sample_g_point(&mut rng, n, 0.0);
            let g2 = sample_g_point(&mut rng, n, 0.05);
            let (p1, p2) = (Point::G(g1.clone()), Point::G(g2.clone()));
            let f1s = test_family(&mut rng, &p1, cfg.funcs);
            let f2s = test_family(&mut rng, &p2, cfg.funcs);
            let m2 = match which {
                Coproduct::Delta0 => ad_c(&embed_b(&g2.b)),
                Coproduct::Delta => w_of_b(&g2.b)?,
            };
            let mut worst = 0.0f64;
            for al in 0..=n {
                let e = unit(n + 1, al);
                for (f1, f2) in f1s.iter().zip(&f2s) {
                    let pf = |t: f64| -> Result<f64> {
                        let (x, y) = bisection_image(&c_exp(&(&e * t)), which, &g1, &g2)?;
                        Ok(f1.eval_coords(&Point::G(x).coords()) * f2.eval_coords(&Point::G(y).coords()))
                    };
                    let lhs = central_diff(h, &pf)?;
                    let xd = |f: &TestFn, g: &GroupoidPoint, c: &DVector<f64>| -> Result<f64> {
                        central_diff(h, |t| Ok(f.eval_coords(&Point::G(flow_g(c, t, g)?).coords())))
                    };
                    let v1 = f1.eval_coords(&p1.coords());
                    let v2 = f2.eval_coords(&p2.coords());
                    let mut rhs = v1 * xd(f2, &g2, &e)?;
                    for be in 0..=n {
                        rhs += m2[(be, al)] * xd(f1, &g1, &unit(n + 1, be))? * v2;
                    }
                    worst = worst.max((lhs - rhs).abs());
                }
            }
            Ok(worst)
        })?;
        out.push(Residual::new(name, r, cfg.count() * (n + 1), Some(h), cfg.tol_fd));
    }

    // The same vector field on Γ_A × Γ_A, through Γ_A ≅ Γ_{B′}.
    let r = par_max(cfg.samples, |i| {
        let mut rng = cfg.rng(45, i);
        let p1 = sample_a_point(&mut rng, n);
        let p2 = sample_a_point(&mut rng, n);
        let (g1, g2) = (gamma_a_iso(&p1), gamma_a_iso(&p2));
        let mut m = 0.0f64;
        for al in 0..=n {
            let e = unit(n + 1, al);
            let img = |t: f64| -> Result<(AGroupoidPoint, AGroupoidPoint)> {
                let (x, y) = bisection_image(&c_exp(&(&e * t)), Coproduct::Delta, &g1, &g2)?;
                Ok((gamma_a_iso_inv(&x)?, gamma_a_iso_inv(&y)?))
            };
            let v1 = right_velocity(h, &p1.matrix(), |t| Ok(img(t)?.0.matrix()))?;
            let v2 = right_velocity(h, &p2.matrix(), |t| Ok(img(t)?.1.matrix()))?;
            let x1 = c_element(n, &(ad_ctilde(&embed_a(&p1.a)) * (w_matrix(&p2.a) * &e))).matrix;
            let x2 = c_element(n, &(ad_ctilde(&embed_a(&p2.a)) * &e)).matrix;
            m = m.max((v1 - x1).amax()).max((v2 - x2).amax());
        }
        Ok(m)
    })?;
    out.push(Residual::new("gamma_a_coproduct_vector_field", r, cfg.samples * (n + 1), Some(h), cfg.tol_fd));
    Ok(out)
}

/// The Γ_A generator relations and the Zakrzewski relations on Γ_A.
pub fn zakrzewski_bridge(cfg: &OpCheck) -> Result<Vec<Residual>> {
    let n = cfg.n;
    let h = cfg.h;
    let hc = cfg.h_composed;
    let nn = n as f64;
    let eta = {
        let mut e = DMatrix::identity(n + 1, n + 1) * -1.0;
        e[(0, 0)] = 1.0;
        e
    };
    let mut out = Vec::new();
    let with_point = |tag: u64, body: &(dyn Fn(&Point, &[TestFn]) -> Result<f64> + Sync)| {
        par_max(cfg.samples, |i| {
            let mut rng = cfg.rng(tag, i);
            let p = Point::A(sample_a_point(&mut rng, n));
            let fs = test_family(&mut rng, &p, cfg.funcs);
            body(&p, &fs)
        })
    };
    let comm_res = |p: &Point, fs: &[TestFn], a: SymbolOp, q: CoordFn, rhs: f64, step: f64| -> Result<f64> {
        let op = SymbolOp::comm(a, SymbolOp::mult(q));
        let mut m = 0.0f64;
        for f in fs {
            m = m.max(op_vs_fn(&op, rhs, f, p, step)?);
        }
        Ok(m)
    };

    let r = with_point(50, &|p, _| {
        let l = p.l_matrix()?;
        Ok((l.transpose() * &eta * &l - &eta).amax())
    })?;
    out.push(Residual::new("zak_l_orthogonality", r, cfg.samples, None, cfg.tol_exact));

    let r = with_point(51, &|p, fs| {
        let mut m = 0.0f64;
        for f in fs {
            let ff = |q: &Point| f.eval(q);
            for a in 0..=n {
                for b in 0..=n {
                    let op = SymbolOp::comm(SymbolOp::mult(CoordFn::L(a, b)), SymbolOp::mult(CoordFn::L(b, a)));
                    m = m.max(op.apply(&ff, p, h)?.norm());
                }
            }
        }
        Ok(m)
    })?;
    out.push(Residual::new("zak_l_commute", r, cfg.count(), None, cfg.tol_exact));

    let r = with_point(52, &|p, fs| {
        let mut m = 0.0f64;
        for g in 0..=n {
            m = m.max(comm_res(p, fs, SymbolOp::y_hat(n, g), CoordFn::SgnAlpha, 0.0, h)?);
        }
        Ok(m)
    })?;
    out.push(Residual::new("sgn_alpha_central", r, cfg.count(), Some(h), cfg.tol_fd));

    let r = with_point(53, &|p, fs| {
        let b = p.base_b()?;
        let a = b.alpha;
        let mut m = 0.0f64;
        for g in 0..=n {
            let inv = if g == 0 { 1.0 - 1.0 / (a * a) } else { (a - 1.0) / (a * a) * b.w[g - 1] };
            m = m.max(comm_res(p, fs, SymbolOp::y_hat(n, g), CoordFn::InvAlpha, inv, h)?);
            m = m.max(comm_res(p, fs, SymbolOp::y_hat(n, g), CoordFn::InvAbsAlpha, a.signum() * inv, h)?);
        }
        Ok(m)
    })?;
    out.push(Residual::new("inverse_alpha_commutators", r, cfg.count(), Some(h), cfg.tol_fd));

    let r = with_point(54, &|p, fs| {
        let l = p.l_matrix()?;
        let mut m = 0.0f64;
        for g in 0..=n {
            for be in 0..=n {
                for mu in 0..=n {
                    let rhs = delta(g, mu) * (delta(be, 0) - l[(be, 0)])
                        - eta_sign(g) * l[(be, g)] * (l[(0, mu)] - delta(0, mu));
                    m = m.max(comm_res(p, fs, SymbolOp::y_hat(n, g), CoordFn::L(be, mu), rhs, h)?);
                }
            }
        }
        Ok(m)
    })?;
    out.push(Residual::new("y_l_commutators", r, cfg.count(), Some(h), cfg.tol_composed));

    let r = with_point(55, &|p, fs| {
        let l = p.l_matrix()?;
        let mut m = 0.0f64;
        for be in 0..=n {
            let mut terms = Vec::new();
            for g in 0..=n {
                terms.push(SymbolOp::comm(SymbolOp::y_hat(n, g), SymbolOp::mult(CoordFn::L(be, g))));
            }
            let op = SymbolOp::Sum(terms);
            let rhs = nn * (delta(be, 0) - l[(be, 0)]);
            for f in fs {
                m = m.max(op_vs_fn(&op, rhs, f, p, h)?);
            }
        }
        Ok(m)
    })?;
    out.push(Residual::new("trace_identity_Y_L", r, cfg.count(), Some(h), cfg.tol_composed));

    let r = with_point(56, &|p, fs| {
        let l = p.l_matrix()?;
        let mut m = 0.0f64;
        for rho in 0..=n {
            let a = SymbolOp::zak_a(n, rho);
            for be in 0..=n {
                for mu in 0..=n {
                    let rhs = l[(rho, mu)] * (l[(be, 0)] - delta(be, 0))
                        + eta_sign(rho) * delta(rho, be) * (l[(0, mu)] - delta(0, mu));
                    m = m.max(comm_res(p, fs, a.clone(), CoordFn::L(be, mu), rhs, h)?);
                }
            }
        }
        Ok(m)
    })?;
    out.push(Residual::new("a_l_commutators", r, cfg.count(), Some(h), cfg.tol_composed));

    // The cross relations between a_α and L_{βγ} in their standard form, h = 1.
    let r = with_point(57, &|p, fs| {
        let l = p.l_matrix()?;
        let mut m = 0.0f64;
        let a0 = SymbolOp::zak_a(n, 0);
        m = m.max(comm_res(p, fs, a0.clone(), CoordFn::L(0, 0), l[(0, 0)] * l[(0, 0)] - 1.0, h)?);
        for k in 1..=n {
            let ak = SymbolOp::zak_a(n, k);
            m = m.max(comm_res(p, fs, ak.clone(), CoordFn::L(0, 0), (l[(0, 0)] - 1.0) * l[(k, 0)], h)?);
            m = m.max(comm_res(p, fs, a0.clone(), CoordFn::L(0, k), l[(0, 0)] * l[(0, k)], h)?);
            m = m.max(comm_res(p, fs, a0.clone(), CoordFn::L(k, 0), l[(0, 0)] * l[(k, 0)], h)?);
            for mm in 1..=n {
                m = m.max(comm_res(p, fs, ak.clone(), CoordFn::L(0, mm), (l[(0, 0)] - 1.0) * l[(k, mm)], h)?);
                let rhs = l[(k, 0)] * l[(mm, 0)] - delta(k, mm) * (l[(0, 0)] - 1.0);
                m = m.max(comm_res(p, fs, ak.clone(), CoordFn::L(mm, 0), rhs, h)?);
                m = m.max(comm_res(p, fs, a0.clone(), CoordFn::L(k, mm), l[(k, 0)] * l[(0, mm)], h)?);
                for nu in 1..=n {
                    let rhs = l[(mm, 0)] * l[(k, nu)] - delta(k, mm) * l[(0, nu)];
                    m = m.max(comm_res(p, fs, ak.clone(), CoordFn::L(mm, nu), rhs, h)?);
                }
            }
        }
        Ok(m)
    })?;
    out.push(Residual::new("zak_target_relations", r, cfg.count(), Some(h), cfg.tol_composed));

    // [a_α, a_β] against the Zakrzewski form, with nested differences.
    let r = with_point(58, &|p, fs| {
        let mut m = 0.0f64;
        for mu in 0..=n {
            for nu in (mu + 1)..=n {
                let (am, an) = (SymbolOp::zak_a(n, mu), SymbolOp::zak_a(n, nu));
                let lhs = SymbolOp::comm(am.clone(), an.clone());
                let rhs = SymbolOp::Sum(vec![
                    SymbolOp::scaled(I * delta(mu, 0), an),
                    SymbolOp::scaled(-I * delta(nu, 0), am),
                ]);
                for f in fs {
                    let ff = |q: &Point| f.eval(q);
                    m = m.max((lhs.apply(&ff, p, hc)? - rhs.apply(&ff, p, hc)?).norm());
                }
            }
        }
        Ok(m)
    })?;
    out.push(Residual::new("zak_a_brackets", r, cfg.count(), Some(hc), cfg.tol_composed));
    Ok(out)
}

/// Ad^#(b) = Ad^𝔠(b⁻¹)ᵗ in the basis dual to (ċ_β).
pub fn ad_sharp(b: &BParam) -> DMatrix<f64> {
    ad_c(&embed_b(&b.inverse())).transpose()
}

/// Classical Hopf identities of the commutative models 𝔟⁰ ⋊ B and 𝔞⁰ ⋊ A.
pub fn hopf_group_level(cfg: &OpCheck, tol: f64) -> Result<Vec<Residual>> {
    let n = cfg.n;
    let d = n + 1;
    let eye = DMatrix::<f64>::identity(d, d);
    let mut out = Vec::new();

    // 𝔟⁰ ⋊ B with (φ, b)(ψ, h) = (φ + Ad^#(b)ψ, bh).
    let r = par_max(cfg.samples, |i| {
        let mut rng = cfg.rng(60, i);
        let (b1, b2) = (sample_b(&mut rng, n), sample_b(&mut rng, n));
        let (p1, p2) = (gaussian_vec(&mut rng, d), gaussian_vec(&mut rng, d));
        let b12 = recover_b(&embed_b(&b1).mul(&embed_b(&b2)))?;
        let (s1, s2, s12) = (ad_sharp(&b1), ad_sharp(&b2), ad_sharp(&b12));
        let (c1, c2, c12) = (ad_c(&embed_b(&b1)), ad_c(&embed_b(&b2)), ad_c(&embed_b(&b12)));
        let p12 = &p1 + &s1 * &p2;
        let mut m = 0.0f64;
        // Δ(ċ_k), Δ(Ad^#), Δ(Ad^𝔠) as pullbacks along the product.
        // ⟨Ad^#(b₁)φ₂, ċ_k⟩ = φ₂(Ad(b₁⁻¹)ċ_k), φ₂ vanishing on 𝔟, from the full adjoint action.
        let g1 = embed_b(&b1);
        let gi = g1.inverse();
        let cb = c_basis(n);
        let direct = DVector::from_fn(d, |k, _| p2.dot(&c_coords(n, &(&gi.m * &cb[k].matrix * &g1.m))));
        m = m.max((&p12 - (&p1 + direct)).amax());
        m = m.max((&s12 - &s1 * &s2).amax());
        m = m.max((&c12 - &c1 * &c2).amax());
        // Ad^#(b⁻¹)_{lk} = Ad^𝔠(b)_{kl}.
        m = m.max((ad_sharp(&b1.inverse()).transpose() - &c1).amax());
        m = m.max((&c1.transpose() * &s1 - &eye).amax());
        // Antipode: pullback along (φ, b)⁻¹ = (−Ad^#(b⁻¹)φ, b⁻¹).
        let inv_phi = -(ad_sharp(&b1.inverse()) * &p1);
        m = m.max((&inv_phi + c1.transpose() * &p1).amax());
        m = m.max((ad_sharp(&b1.inverse()) - c1.transpose()).amax());
        m = m.max((ad_c(&embed_b(&b1.inverse())) - s1.transpose()).amax());
        // The coproduct of Ã = −Ad^𝔠ᵗ φ.
        let at = |c: &DMatrix<f64>, p: &DVector<f64>| -(c.transpose() * p);
        let (a1, a2, a12) = (at(&c1, &p1), at(&c2, &p2), at(&c12, &p12));
        m = m.max((&a12 - (&a2 + c2.transpose() * &a1)).amax());
        let inv_b = b1.inverse();
        let a_inv = at(&ad_c(&embed_b(&inv_b)), &inv_phi);
        m = m.max((&a_inv + &s1 * &a1).amax());
        m = m.max((&a_inv - p1.clone()).amax());
        m = m.max((&p1 + &s1 * &a1).amax());
        Ok(m)
    })?;
    out.push(Residual::new("classical_hopf_identities", r, cfg.samples, None, tol));

    let r = {
        let e = BParam::identity(n);
        (ad_sharp(&e) - &eye).amax().max((ad_c(&embed_b(&e)) - &eye).amax())
    };
    out.push(Residual::new("classical_counit", r, 1, None, tol));

    // The 𝔞⁰ ⋊ A residuals are backward errors: each side is divided by the size of the
    // products that form it, since W reaches |W| ~ 10 on the sampled disk and entries cancel.
    let dd = d as f64;
    let rel = |a: &DMatrix<f64>, b: &DMatrix<f64>, scale: f64| (a - b).amax() / (1.0 + scale);
    let relv = |a: &DVector<f64>, b: &DVector<f64>, scale: f64| (a - b).amax() / (1.0 + scale);
    let pm = |x: &DMatrix<f64>, y: &DMatrix<f64>| dd * x.amax() * y.amax();
    let pv = |x: &DMatrix<f64>, y: &DVector<f64>| dd * x.amax() * y.amax();

    // V = W, V^c = ηWη on 𝔞⁰ ⋊ A with a(φ, a) = φ; with L = V these are the Zakrzewski coproduct,
    // antipode and counit.
    let r = par_max(cfg.samples, |i| {
        let mut rng = cfg.rng(61, i);
        let (x1, x2) = (sample_a(&mut rng, n), sample_a(&mut rng, n));
        let x12 = crate::decomp::factor_ca(&embed_a(&x1).mul(&embed_a(&x2)))?.a;
        let (p1, p2) = (gaussian_vec(&mut rng, d), gaussian_vec(&mut rng, d));
        let (v1, v2, v12) = (w_matrix(&x1), w_matrix(&x2), w_matrix(&x12));
        let (vc1, vc2, vc12) = (eta_conj(&v1), eta_conj(&v2), eta_conj(&v12));
        let p12 = &p1 + &v1 * &p2;
        let mut m = 0.0f64;
        m = m.max(rel(&(&v1 * vc1.transpose()), &eye, pm(&v1, &vc1)));
        m = m.max(rel(&(vc1.transpose() * &v1), &eye, pm(&v1, &vc1)));
        m = m.max(rel(&(&vc1 * v1.transpose()), &eye, pm(&v1, &vc1)));
        m = m.max(rel(&v12, &(&v1 * &v2), pm(&v1, &v2)));
        m = m.max(rel(&vc12, &(&vc1 * &vc2), pm(&vc1, &vc2)));
        let big_a = |vc: &DMatrix<f64>, p: &DVector<f64>| -(vc.transpose() * p);
        let (a1, a2, a12) = (big_a(&vc1, &p1), big_a(&vc2, &p2), big_a(&vc12, &p12));
        m = m.max(relv(&a12, &(&a2 + vc2.transpose() * &a1), a2.amax() + pv(&vc2, &a1) + pv(&vc12, &p12)));
        m = m.max(relv(&p1, &-(&v1 * &a1), pv(&v1, &a1)));
        // Antipode and counit: S(a) = −S(L)a with S(L) = ηLᵗη = L⁻¹, ε at the unit.
        let inv = -(eta_conj(&v1.transpose()) * &p1);
        m = m.max(relv(&(&v1 * &inv), &-&p1, pv(&v1, &inv)));
        m = m.max((w_matrix(&AParam::identity(n)) - &eye).amax());
        Ok(m)
    })?;
    out.push(Residual::new("bicrossed_w_model_rel", r, cfg.samples, None, tol));

    // The dual choice V^c = W, V = ηWη and A(φ, a) = Wᵗηφ on (φ₁ + W(a₁)φ₂, a₁a₂).
    let r = par_max(cfg.samples, |i| {
        let mut rng = cfg.rng(62, i);
        let (x1, x2) = (sample_a(&mut rng, n), sample_a(&mut rng, n));
        let x12 = crate::decomp::factor_ca(&embed_a(&x1).mul(&embed_a(&x2)))?.a;
        let (p1, p2) = (gaussian_vec(&mut rng, d), gaussian_vec(&mut rng, d));
        let (w1, w2, w12) = (w_matrix(&x1), w_matrix(&x2), w_matrix(&x12));
        let (v1, v12) = (eta_conj(&w1), eta_conj(&w12));
        let v2 = eta_conj(&w2);
        let p12 = &p1 + &w1 * &p2;
        let mut eta = eye.clone() * -1.0;
        eta[(0, 0)] = 1.0;
        let big_a = |w: &DMatrix<f64>, p: &DVector<f64>| w.transpose() * &eta * p;
        let (a1, a2, a12) = (big_a(&w1, &p1), big_a(&w2, &p2), big_a(&w12, &p12));
        let mut m = 0.0f64;
        m = m.max(relv(&a12, &(&a2 + w2.transpose() * &a1), a2.amax() + pv(&w2, &a1) + pv(&w12, &p12)));
        m = m.max(rel(&v12, &(&v1 * &v2), pm(&v1, &v2)));
        let small = |v: &DMatrix<f64>, a: &DVector<f64>| -(v * a);
        let (s1, s2, s12) = (small(&v1, &a1), small(&v2, &a2), small(&v12, &a12));
        m = m.max(relv(&s12, &(&s1 + &v1 * &s2), s1.amax() + pv(&v1, &s2) + pv(&v12, &a12)));
        m = m.max(relv(&a1, &-(w1.transpose() * &s1), pv(&w1, &s1)));
        Ok(m)
    })?;
    out.push(Residual::new("bicrossed_dual_model_rel", r, cfg.samples, None, tol));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn small(n: usize) -> OpCheck {
        OpCheck {
            funcs: 2,
            ..OpCheck::new(n, 7, 6)
        }
    }

    fn assert_all(rs: &[Residual]) {
        for r in rs {
            assert!(r.pass, "{} residual {:e} > {:e}", r.name, r.residual, r.tol);
        }
    }

    #[test]
    fn lie_derivative_of_alpha_along_c0() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let g = sample_g_point(&mut rng, 2, 0.0);
        let a = g.b.alpha;
        let p = Point::G(g);
        let op = SymbolOp::LieDeriv(unit(3, 0));
        let v = op.apply(&|q: &Point| Ok(Complex64::new(CoordFn::Alpha.eval(q)?, 0.0)), &p, 1e-5).unwrap();
        assert!((v - I * (1.0 - a * a)).norm() < 1e-9);
        let m = SymbolOp::mult(CoordFn::Alpha).apply(&|_: &Point| Ok(Complex64::new(1.0, 0.0)), &p, 1e-5).unwrap();
        assert_eq!(m, Complex64::new(a, 0.0));
        let f = TestFn::random(&mut rng, &p.coords());
        let s = SymbolOp::y_hat(2, 0);
        let x = SymbolOp::compose(s.clone(), SymbolOp::identity()).apply(&|q: &Point| f.eval(q), &p, 1e-5).unwrap();
        let y = s.apply(&|q: &Point| f.eval(q), &p, 1e-5).unwrap();
        assert_eq!(x, y);
    }

    #[test]
    fn commutator_examples() {
        let b = BParam {
            lam: DMatrix::from_row_slice(1, 1, &[0.0]),
            u: DVector::from_vec(vec![1.0]),
            w: DVector::from_vec(vec![-1.0]),
            alpha: 0.0,
        };
        assert_eq!(flow_derivative_closed(&CoordFn::Alpha, &unit(2, 0), &b).unwrap(), 1.0);
        let e = BParam::identity(2);
        for m in 1..=2 {
            for k in 0..2 {
                assert_eq!(flow_derivative_closed(&CoordFn::U(k), &unit(3, m), &e).unwrap(), 0.0);
            }
        }
    }

    #[test]
    fn flow_commutators_small() {
        for n in 1..=3 {
            assert_all(&check_flow_commutators(&small(n)).unwrap());
        }
    }

    #[test]
    fn brackets_small() {
        for n in 1..=3 {
            assert_all(&check_generator_brackets(&small(n)).unwrap());
        }
    }

    #[test]
    fn coproducts_small() {
        for n in 1..=3 {
            assert_all(&check_coproduct_fns(&small(n)).unwrap());
            assert_all(&check_coproduct_generators(&small(n)).unwrap());
        }
    }

    #[test]
    fn coproduct_unit_legs() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let e = BParam::identity(2);
        let b = sample_g_point(&mut rng, 2, 0.05).b;
        for f in BFn::all(2) {
            assert!((coproduct_fn(f, &e, &b).unwrap() - f.eval(&b)).abs() < 1e-12);
            assert!((coproduct_fn(f, &b, &e).unwrap() - f.eval(&b)).abs() < 1e-12);
        }
    }

    #[test]
    fn zakrzewski_small() {
        for n in 1..=3 {
            assert_all(&zakrzewski_bridge(&small(n)).unwrap());
        }
    }

    #[test]
    fn hopf_small() {
        for n in 1..=3 {
            assert_all(&hopf_group_level(&small(n), 1e-12).unwrap());
        }
    }
}
