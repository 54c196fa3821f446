//! The twist bisections T_t of G_B × Γ_{B′}, the coproduct relation δ they produce, the
//! generator of the unitary twist, the measure estimate on V_ε and the κ-Minkowski coaction.

use crate::decomp::{a_factor, b_r, ca_project, factor_bc, factor_ca, factor_cb, B_PRIME_GUARD};
use crate::error::{Error, Result};
use crate::groupoid::{bisection_apply, gb_compose, gb_ends, GroupoidPoint};
use crate::groups::{
    c_inv, c_mul, embed_a, embed_b, embed_c, gaussian_vec, log_c, log_over_sm1, recover_a, sample_a,
    sample_b, sample_c, stream_rng, AParam, BParam, CParam,
};
use crate::infgen::{ad_c, bisection_image, central_diff, flow_g, c_coords, c_element, c_exp, j_c_of, right_velocity, tr_ad_c, Coproduct};
use crate::minkalg::GroupMatrix;
use crate::relations::{par_max, sample_g_point, unit, OpCheck, Point, SymbolOp, TestFn, I};
use crate::report::Residual;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// Lower bound on |α| for sampled points of B′ in the pointwise checks.
const SAMPLE_GUARD: f64 = 0.05;

/// Coordinates D_β of log_C(c̃_L(b)) in the basis (ċ_β).
#[derive(Debug, Clone, PartialEq)]
pub struct DCoeffs(pub DVector<f64>);

impl DCoeffs {
    pub fn n(&self) -> usize {
        self.0.len() - 1
    }

    /// Tr(ad(Σ D_β ċ_β)|𝔠) = n·D₀.
    pub fn trace(&self) -> f64 {
        tr_ad_c(self.n()).dot(&self.0)
    }
}

/// D₀ = −log|α|, D_k = −sgn(α)·log|α|/(|α|−1)·u_k.
pub fn d_coeffs(b: &BParam) -> Result<DCoeffs> {
    if b.alpha.abs() < B_PRIME_GUARD {
        return Err(Error::Domain("b is not in B' (alpha = 0)".into()));
    }
    let aa = b.alpha.abs();
    let n = b.n();
    let mut d = DVector::zeros(n + 1);
    d[0] = -aa.ln();
    let k = -b.sgn_alpha() * log_over_sm1(aa);
    d.rows_mut(1, n).copy_from(&(&b.u * k));
    Ok(DCoeffs(d))
}

/// c_t(b) = exp_C(−t·log_C(c̃_L(b))).
pub fn c_t(t: f64, b: &BParam) -> Result<CParam> {
    Ok(c_exp(&(&d_coeffs(b)?.0 * -t)))
}

/// The element (b₁c_t(b₂), b₂) of T_t with left ends (b₁, b₂).
#[derive(Debug, Clone, PartialEq)]
pub struct TwistPoint {
    pub t: f64,
    pub first: GroupoidPoint,
    pub second: GroupoidPoint,
}

impl TwistPoint {
    pub fn new(t: f64, b1: BParam, b2: BParam) -> Result<Self> {
        let c = c_t(t, &b2)?;
        Ok(TwistPoint {
            t,
            first: GroupoidPoint::new(b1, c),
            second: GroupoidPoint::unit(b2),
        })
    }

    pub fn invariant_residual(&self) -> Result<f64> {
        let e = CParam::identity(self.second.n());
        Ok(self
            .second
            .c
            .dist(&e)
            .max(self.first.c.dist(&c_t(self.t, &self.second.b)?)))
    }
}

/// T_t(b₁c₁, b₂c₂) = (b_R(b₁c_t(b₂)⁻¹)c_t(b₂)c₁, b₂c₂).
pub fn twist_apply(t: f64, g1: &GroupoidPoint, g2: &GroupoidPoint) -> Result<(GroupoidPoint, GroupoidPoint)> {
    let c = c_t(t, &g2.b)?;
    Ok((bisection_apply(&c, g1)?, g2.clone()))
}

/// c̃_L(b).
fn ct_l(b: &BParam) -> Result<CParam> {
    Ok(ca_project(b)?.c)
}

/// c_L(g), from g = c_L(g)b_R(g).
fn c_l(g: &GroupMatrix) -> Result<CParam> {
    Ok(factor_cb(g)?.c)
}

/// c_R(g), from g = b_L(g)c_R(g).
fn c_r(g: &GroupMatrix) -> Result<CParam> {
    Ok(factor_bc(g)?.c)
}

fn bc(b: &BParam, c: &CParam) -> GroupMatrix {
    embed_b(b).mul(&embed_c(c))
}

fn a_mul(a1: &AParam, a2: &AParam) -> Result<AParam> {
    recover_a(&embed_a(a1).mul(&embed_a(a2)))
}

fn a_inv(a: &AParam) -> Result<AParam> {
    recover_a(&embed_a(a).inverse())
}

/// An element of B with |α| ≥ guard.
fn sample_b_guarded(rng: &mut ChaCha8Rng, n: usize, guard: f64) -> BParam {
    loop {
        let b = sample_b(rng, n);
        if b.alpha.abs() >= guard {
            return b;
        }
    }
}

fn rel_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).amax() / (1.0 + a.amax().max(b.amax()))
}

/// The one-parameter group law of T_t, t = 0, the matrix form of the action and the
/// explicit form of T = T₁.
pub fn twist_group_checks(cfg: &OpCheck) -> Result<Vec<Residual>> {
    let n = cfg.n;
    let law = par_max(cfg.samples, |i| {
        let mut rng = cfg.rng(70, i);
        let g1 = sample_g_point(&mut rng, n, 0.0);
        let g2 = sample_g_point(&mut rng, n, SAMPLE_GUARD);
        let s = rng.random_range(-1.5..1.5);
        let t = rng.random_range(-1.5..1.5);
        let (p1, p2) = twist_apply(s, &g1, &g2)?;
        let (q1, q2) = twist_apply(t, &p1, &p2)?;
        let (r1, r2) = twist_apply(t + s, &g1, &g2)?;
        let mut m = q1.dist(&r1).max(q2.dist(&r2)).max(q2.dist(&g2));
        let (z1, _) = twist_apply(0.0, &g1, &g2)?;
        m = m.max(z1.dist(&g1));
        // Left multiplication by c_L(b₁c_t⁻¹)⁻¹ in matrix form.
        let c = c_t(t, &g2.b)?;
        let cl = c_l(&bc(&g1.b, &c_inv(&c)))?;
        let expected = embed_c(&c_inv(&cl)).mul(&g1.matrix());
        let (a1, _) = twist_apply(t, &g1, &g2)?;
        m = m.max(rel_diff(&a1.matrix().m, &expected.m));
        m = m.max(TwistPoint::new(t, g1.b.clone(), g2.b.clone())?.invariant_residual()?);
        Ok(m)
    })?;

    let explicit = par_max(cfg.samples, |i| {
        let mut rng = cfg.rng(71, i);
        let b1 = sample_b(&mut rng, n);
        let b2 = sample_b_guarded(&mut rng, n, SAMPLE_GUARD);
        let (a, _) = twist_apply(1.0, &GroupoidPoint::unit(b1), &GroupoidPoint::unit(b2.clone()))?;
        let aa = b2.alpha.abs();
        let expected = CParam {
            s: 1.0 / aa,
            y: &b2.u / b2.alpha,
        };
        let mut m = a.c.dist(&expected);
        // D against log_C(c̃_L(b)) and the displayed form of c_t.
        let d = d_coeffs(&b2)?;
        m = m.max((log_c(&ct_l(&b2)?).basis_coeffs() - &d.0).amax());
        let t = rng.random_range(-2.0..2.0);
        if (aa - 1.0).abs() > 1e-3 {
            let st = aa.powf(-t);
            let disp = CParam {
                s: st,
                y: &b2.u * (b2.sgn_alpha() * (st - 1.0) / (1.0 - aa)),
            };
            m = m.max(c_t(t, &b2)?.dist(&disp));
        }
        Ok(m)
    })?;

    Ok(vec![
        Residual::new("twist_group_law", law, cfg.samples, None, cfg.tol_exact),
        Residual::new("twist_explicit_form", explicit, cfg.samples, None, cfg.tol_exact),
    ])
}

/// The cocycle identity T₂₃(id×δ₀)T = T₁₂(δ₀×id)T and the section properties of T,
/// (id×δ₀)T and (δ₀×id)T, on sampled left ends (b₁, b₂, b₃) ∈ B × B′ × B′.
pub fn cocycle_check(cfg: &OpCheck) -> Result<Vec<Residual>> {
    let n = cfg.n;
    let cocycle = par_max(cfg.samples, |i| {
        let mut rng = cfg.rng(72, i);
        let b1 = sample_b(&mut rng, n);
        let b2l = sample_b_guarded(&mut rng, n, SAMPLE_GUARD);
        let b3 = sample_b_guarded(&mut rng, n, SAMPLE_GUARD);
        // Shared middle leg g₂ = b₂′c̃_L(b₃)⁻¹ with right end b₂.
        let g2 = GroupoidPoint::new(b2l.clone(), c_inv(&ct_l(&b3)?));
        let (_, b2) = gb_ends(&g2)?;
        // T₂₃(id×δ₀)T: first leg b₁c̃_L(b₂b₃)⁻¹.
        let lhs = GroupoidPoint::new(b1.clone(), c_inv(&ct_l(&b2.mul(&b3))?));
        // T₁₂(δ₀×id)T: t₁ = b₁c̃_L(b₂′)⁻¹ composed with h₁ = b_R(t₁)c_L(g₂).
        let t1 = GroupoidPoint::new(b1, c_inv(&ct_l(&b2l)?));
        let (_, r1) = gb_ends(&t1)?;
        let h1 = GroupoidPoint::new(r1, c_l(&g2.matrix())?);
        let rhs = gb_compose(&t1, &h1)?;
        Ok(lhs.dist(&rhs))
    })?;

    let sections = par_max(cfg.samples, |i| {
        let mut rng = cfg.rng(73, i);
        let r1 = sample_b(&mut rng, n);
        let b2 = sample_b(&mut rng, n);
        let b3 = sample_b_guarded(&mut rng, n, SAMPLE_GUARD);
        let mut m = 0.0f64;
        // T over B × B′ from the right: the unique element with right ends (r₁, b₃).
        let ct3 = ct_l(&b3)?;
        let t = GroupoidPoint::new(b_r(&r1, &ct3)?, c_inv(&ct3));
        m = m.max(gb_ends(&t)?.1.dist(&r1));
        // (id×δ₀)T over B × δ₀(B′), right ends (r₁, b₂, b₃) with b₂b₃ ∈ B′.
        let b23 = b2.mul(&b3);
        if b23.alpha.abs() >= SAMPLE_GUARD {
            let c23 = ct_l(&b23)?;
            let g1 = GroupoidPoint::new(b_r(&r1, &c23)?, c_inv(&c23));
            m = m.max(gb_ends(&g1)?.1.dist(&r1));
            // The common set of the cocycle identity over B × (δ₀(B′) ∩ (B × B′)).
            let g2 = GroupoidPoint::new(b_r(&b2, &ct3)?, c_inv(&ct3));
            m = m.max(gb_ends(&g2)?.1.dist(&b2));
            let lhs_c = c_inv(&c23);
            let rhs_c = c_mul(&c_inv(&ct_l(&g2.b)?), &c_l(&g2.matrix())?);
            m = m.max(lhs_c.dist(&rhs_c));
        }
        // (δ₀×id)T over B × B × B′, right ends (r₁, b₂, b₃).
        let g2 = GroupoidPoint::new(b_r(&b2, &ct3)?, c_inv(&ct3));
        let cl2 = c_l(&g2.matrix())?;
        let h1 = GroupoidPoint::new(b_r(&r1, &c_inv(&cl2))?, cl2.clone());
        m = m.max(gb_ends(&h1)?.1.dist(&r1)).max(gb_ends(&g2)?.1.dist(&b2));
        Ok(m)
    })?;

    Ok(vec![
        Residual::new("twist_cocycle", cocycle, cfg.samples, None, cfg.tol_exact),
        Residual::new("twist_sections", sections, cfg.samples, None, cfg.tol_exact),
    ])
}

/// The point (x, y; z) of δ built from a₁c₁ and c₁ã₂ = a₂c₂.
pub fn mtilde_triple(
    a1: &AParam,
    c1: &CParam,
    at2: &AParam,
) -> Result<(GroupoidPoint, GroupoidPoint, GroupoidPoint)> {
    // c₁ã₂ = a₂c₂ from the CA factorization of its inverse.
    let g = embed_c(c1).mul(&embed_a(at2));
    let f = factor_ca(&g.inverse())?;
    let a2 = a_inv(&f.a)?;
    let c2 = c_inv(&f.c);
    let a12 = a_mul(a1, &a2)?;
    Ok((
        GroupoidPoint::new(a_factor(a1).b, c1.clone()),
        GroupoidPoint::new(a_factor(&a2).b, c2.clone()),
        GroupoidPoint::new(a_factor(&a12).b, c2),
    ))
}

/// The first leg of the point of δ over (b₂c₂; b₃c₂).
pub fn delta_first_leg(b2: &BParam, c2: &CParam, b3: &BParam) -> Result<GroupoidPoint> {
    let ct2 = ct_l(b2)?;
    let b = b_r(&b3.mul(&b2.inverse()), &ct2)?;
    let br = b_r(b2, c2)?;
    let c = c_mul(&c_mul(&c_inv(&ct2), &c_l(&bc(b2, c2))?), &ct_l(&br)?);
    Ok(GroupoidPoint::new(b, c))
}

/// δ extends m̃_C^T, and δ(Bc₀) = T∘δ₀(Bc₀)∘T⁻¹ with the action of Bc₀ on the right leg.
pub fn delta_twisted_check(cfg: &OpCheck) -> Result<Vec<Residual>> {
    let n = cfg.n;
    let membership = par_max(cfg.samples, |i| {
        let mut rng = cfg.rng(74, i);
        // Near α = 0 the CA factors blow up like 1/α; keep the B′ ends away from it.
        let (x, y, z) = loop {
            let a1 = sample_a(&mut rng, n);
            let c1 = sample_c(&mut rng, n);
            let at2 = sample_a(&mut rng, n);
            let (x, y, z) = mtilde_triple(&a1, &c1, &at2)?;
            if y.b.alpha.abs().min(z.b.alpha.abs()) >= SAMPLE_GUARD {
                break (x, y, z);
            }
        };
        let expected = delta_first_leg(&y.b, &y.c, &z.b)?;
        Ok(x.dist(&expected).max(y.c.dist(&z.c)))
    })?;

    let conj = par_max(cfg.samples, |i| {
        let mut rng = cfg.rng(75, i);
        let g1 = sample_g_point(&mut rng, n, 0.0);
        let (g2, c0) = loop {
            let g2 = sample_g_point(&mut rng, n, SAMPLE_GUARD);
            let c0 = sample_c(&mut rng, n);
            if b_r(&g2.b, &c_inv(&c0))?.alpha.abs() >= SAMPLE_GUARD {
                break (g2, c0);
            }
        };
        let (l1, l2) = bisection_image(&c0, Coproduct::Delta, &g1, &g2)?;
        let (p1, p2) = twist_apply(-1.0, &g1, &g2)?;
        let (q1, q2) = bisection_image(&c0, Coproduct::Delta0, &p1, &p2)?;
        let (r1, r2) = twist_apply(1.0, &q1, &q2)?;
        let mut m = l1.dist(&r1).max(l2.dist(&r2));
        m = m.max(l2.dist(&bisection_apply(&c0, &g2)?));
        let e = CParam::identity(n);
        let (i1, i2) = bisection_image(&e, Coproduct::Delta, &g1, &g2)?;
        m = m.max(i1.dist(&g1)).max(i2.dist(&g2));
        Ok(m)
    })?;

    Ok(vec![
        Residual::new("delta_extends_mtilde", membership, cfg.samples, None, cfg.tol_exact),
        Residual::new("delta_bisection_conjugation", conj, cfg.samples, None, cfg.tol_exact),
    ])
}

/// Σᵢ fᵢ(g₁)hᵢ(g₂), a non-separable test function on pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct PairFn {
    pub terms: Vec<(TestFn, TestFn)>,
}

impl PairFn {
    pub fn random(rng: &mut ChaCha8Rng, g1: &GroupoidPoint, g2: &GroupoidPoint, terms: usize) -> Self {
        let x1 = Point::G(g1.clone()).coords();
        let x2 = Point::G(g2.clone()).coords();
        PairFn {
            terms: (0..terms)
                .map(|_| (TestFn::random(rng, &x1), TestFn::random(rng, &x2)))
                .collect(),
        }
    }

    pub fn eval(&self, g1: &GroupoidPoint, g2: &GroupoidPoint) -> f64 {
        let x1 = Point::G(g1.clone()).coords();
        let x2 = Point::G(g2.clone()).coords();
        self.terms
            .iter()
            .map(|(f, h)| f.eval_coords(&x1) * h.eval_coords(&x2))
            .sum()
    }
}

/// X^r_T F by a central difference along T_t.
pub fn twist_field_fd(f: &PairFn, g1: &GroupoidPoint, g2: &GroupoidPoint, h: f64) -> Result<f64> {
    central_diff(h, |t| {
        let (p1, p2) = twist_apply(t, g1, g2)?;
        Ok(f.eval(&p1, &p2))
    })
}

/// (𝒯F)(g₁, g₂) = ι(X^r_T F − ½Tr(ad log_C c̃_L(b₂))F).
pub fn twist_generator_apply(f: &PairFn, g1: &GroupoidPoint, g2: &GroupoidPoint, h: f64) -> Result<Complex64> {
    let d = d_coeffs(&g2.b)?;
    let x = twist_field_fd(f, g1, g2, h)?;
    Ok(I * (x - 0.5 * d.trace() * f.eval(g1, g2)))
}

/// 𝒯 = −Σ A_β ⊗ D_β, with A_β acting on the first leg.
pub fn twist_generator_factorized(f: &PairFn, g1: &GroupoidPoint, g2: &GroupoidPoint, h: f64) -> Result<Complex64> {
    let n = g1.n();
    let d = d_coeffs(&g2.b)?;
    let leg = |q: &Point| -> Result<Complex64> {
        match q {
            Point::G(g) => Ok(Complex64::new(f.eval(g, g2), 0.0)),
            Point::A(_) => Err(Error::Domain("pair functions live on G_B".into())),
        }
    };
    let p = Point::G(g1.clone());
    let mut acc = Complex64::new(0.0, 0.0);
    for beta in 0..=n {
        acc -= d.0[beta] * SymbolOp::y_hat(n, beta).apply(&leg, &p, h)?;
    }
    Ok(acc)
}

/// Ŝ ⊗ log|α| + Σ Ŷ_k ⊗ sgn(α)log|α|/(|α|−1)·u_k, written out in the coordinates of b₂.
pub fn twist_generator_kappa(f: &PairFn, g1: &GroupoidPoint, g2: &GroupoidPoint, h: f64) -> Result<Complex64> {
    let n = g1.n();
    let b2 = &g2.b;
    if b2.alpha.abs() < B_PRIME_GUARD {
        return Err(Error::Domain("second leg not in B'".into()));
    }
    let aa = b2.alpha.abs();
    let leg = |q: &Point| -> Result<Complex64> {
        match q {
            Point::G(g) => Ok(Complex64::new(f.eval(g, g2), 0.0)),
            Point::A(_) => Err(Error::Domain("pair functions live on G_B".into())),
        }
    };
    let p = Point::G(g1.clone());
    let mut acc = SymbolOp::y_hat(n, 0).apply(&leg, &p, h)? * aa.ln();
    let k = b2.sgn_alpha() * log_over_sm1(aa);
    for j in 1..=n {
        acc += SymbolOp::y_hat(n, j).apply(&leg, &p, h)? * (k * b2.u[j - 1]);
    }
    Ok(acc)
}

/// (T̂_tF)(g₁, g₂) = F(T_{−t}(g₁, g₂))·j_C(c_t(b₂))^{−1/2}.
pub fn twist_unitary_apply(t: f64, f: &PairFn, g1: &GroupoidPoint, g2: &GroupoidPoint) -> Result<f64> {
    let (p1, p2) = twist_apply(-t, g1, g2)?;
    Ok(f.eval(&p1, &p2) * j_c_of(&c_t(t, &g2.b)?).powf(-0.5))
}

/// Trace of ad(Σ v_β ċ_β) on 𝔠 computed from matrix brackets.
fn trace_ad(n: usize, v: &DVector<f64>) -> f64 {
    let x = c_element(n, v).matrix;
    (0..=n)
        .map(|b| {
            let e = c_element(n, &unit(n + 1, b)).matrix;
            c_coords(n, &(&x * &e - &e * &x))[b]
        })
        .sum()
}

/// The vector field of T_t, the generator in its three forms, the flow of T̂_t and the trace term.
pub fn twist_generator_check(cfg: &OpCheck) -> Result<Vec<Residual>> {
    let n = cfg.n;
    let h = cfg.h;
    let count = cfg.samples;

    let field = par_max(count, |i| {
        let mut rng = cfg.rng(76, i);
        let g1 = sample_g_point(&mut rng, n, 0.0);
        let g2 = sample_g_point(&mut rng, n, 0.1);
        let mut m = 0.0f64;
        // Right-invariant form: −Ad^𝔠(b₁)log_C c̃_L(b₂).
        let zeta = log_c(&ct_l(&g2.b)?).basis_coeffs();
        let v = right_velocity(h, &g1.matrix(), |t| Ok(twist_apply(t, &g1, &g2)?.0.matrix()))?;
        let expected = c_element(n, &(-(ad_c(&embed_b(&g1.b)) * &zeta))).matrix;
        m = m.max(rel_diff(&v, &expected));
        // X^r_T = −Σ D_β(b₂) X^r_β on pair functions; the two sides differentiate along
        // different curves.
        let d = d_coeffs(&g2.b)?;
        for _ in 0..cfg.funcs {
            let f = PairFn::random(&mut rng, &g1, &g2, 2);
            let lhs = central_diff(h, |t| {
                let (p1, p2) = twist_apply(t, &g1, &g2)?;
                Ok(f.eval(&p1, &p2))
            })?;
            let mut rhs = 0.0;
            for beta in 0..=n {
                let e = unit(n + 1, beta);
                rhs -= d.0[beta] * central_diff(h, |t| Ok(f.eval(&flow_g(&e, t, &g1)?, &g2)))?;
            }
            m = m.max((lhs - rhs).abs());
        }
        Ok(m)
    })?;

    let forms = par_max(count, |i| {
        let mut rng = cfg.rng(77, i);
        let g1 = sample_g_point(&mut rng, n, 0.0);
        let g2 = sample_g_point(&mut rng, n, 0.1);
        let mut m = 0.0f64;
        for _ in 0..cfg.funcs {
            let f = PairFn::random(&mut rng, &g1, &g2, 2);
            let a = twist_generator_apply(&f, &g1, &g2, h)?;
            let b = twist_generator_factorized(&f, &g1, &g2, h)?;
            let c = twist_generator_kappa(&f, &g1, &g2, h)?;
            m = m.max((a - b).norm()).max((b - c).norm());
        }
        Ok(m)
    })?;

    let flow = par_max(count, |i| {
        let mut rng = cfg.rng(78, i);
        let g1 = sample_g_point(&mut rng, n, 0.0);
        let g2 = sample_g_point(&mut rng, n, 0.1);
        let mut m = 0.0f64;
        for _ in 0..cfg.funcs {
            let f = PairFn::random(&mut rng, &g1, &g2, 2);
            let dt = central_diff(h, |t| twist_unitary_apply(t, &f, &g1, &g2))?;
            let t = twist_generator_apply(&f, &g1, &g2, h)?;
            m = m.max((Complex64::new(dt, 0.0) - I * t).norm());
        }
        Ok(m)
    })?;

    let trace = par_max(count, |i| {
        let mut rng = cfg.rng(79, i);
        let b = sample_b_guarded(&mut rng, n, SAMPLE_GUARD);
        let d = d_coeffs(&b)?;
        let tr = trace_ad(n, &d.0);
        Ok((tr - d.trace()).abs().max((tr - n as f64 * d.0[0]).abs()))
    })?;

    Ok(vec![
        Residual::new("twist_vector_field", field, count * cfg.funcs, Some(h), cfg.tol_fd),
        Residual::new("twist_generator_forms", forms, count * cfg.funcs, Some(h), cfg.tol_fd),
        Residual::new("twist_unitary_flow", flow, count * cfg.funcs, Some(h), cfg.tol_fd),
        Residual::new("twist_trace_term", trace, count, None, cfg.tol_exact),
    ])
}

/// Volume of the unit ball in ℝⁿ.
pub fn ball_volume(n: usize) -> f64 {
    match n {
        0 => 1.0,
        1 => 2.0,
        _ => ball_volume(n - 2) * 2.0 * std::f64::consts::PI / n as f64,
    }
}

/// ε (log M/δ)·4nF(n)/(δ−ε)ⁿ.
pub fn measure_bound(n: usize, m: f64, delta: f64, eps: f64) -> Result<f64> {
    check_measure_params(m, delta, eps)?;
    Ok(eps * m.ln() / delta * 4.0 * n as f64 * ball_volume(n) / (delta - eps).powi(n as i32))
}

fn check_measure_params(m: f64, delta: f64, eps: f64) -> Result<()> {
    if !(m > 1.0) {
        return Err(Error::Config(format!("M = {m} must exceed 1")));
    }
    if !(0.0 < eps && eps < delta && delta < 1.0) {
        return Err(Error::Config(format!(
            "need 0 < eps < delta < 1, got eps = {eps}, delta = {delta}"
        )));
    }
    Ok(())
}

/// α of b_R(bc)·b₁.
pub fn alpha2(b: &BParam, b1: &BParam, c: &CParam) -> Result<f64> {
    Ok(b_r(b, c)?.mul(b1).alpha)
}

/// The balls (y₁, r₁) ⊃ (y₂, r₂) bounding the y-section of Z at fixed s; `None` when α = 1.
pub fn two_balls(b: &BParam, b1: &BParam, s: f64, eps: f64) -> Option<((DVector<f64>, f64), (DVector<f64>, f64))> {
    if (1.0 - b.alpha).abs() < 1e-12 {
        return None;
    }
    let base = &b.w * (s / (1.0 - b.alpha));
    let a1 = b1.alpha.abs();
    let sg = b1.sgn_alpha();
    let q = (1.0 - eps * eps).sqrt();
    let y1 = &base + &b1.u * (sg / (a1 - eps));
    let y2 = &base + &b1.u * (sg / (a1 + eps));
    Some(((y1, q / (a1 - eps)), (y2, q / (a1 + eps))))
}

fn unit_ball_point(rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
    let g = gaussian_vec(rng, n);
    let r = rng.random::<f64>().powf(1.0 / n as f64);
    &g / g.norm().max(1e-300) * r
}

const MC_CHUNK: usize = 4096;

/// Monte-Carlo estimate and standard error of μ(b, b₁, K_M; V_ε) = ∫_Z ds dy/s.
///
/// log s is uniform on [−log M, log M] and y uniform in the ball (y₁(s), r₁) that
/// contains the y-section of Z. Chunks use their own RNG stream and are reduced in order.
pub fn mu_estimate(b: &BParam, b1: &BParam, m: f64, eps: f64, samples: usize, seed: u64) -> Result<(f64, f64)> {
    let n = b.n();
    if two_balls(b, b1, 1.0, eps).is_none() {
        return Ok((0.0, 0.0));
    }
    let l = m.ln();
    let chunks = samples.div_ceil(MC_CHUNK);
    let hits: Vec<Result<usize>> = (0..chunks)
        .into_par_iter()
        .map(|k| {
            let mut rng = stream_rng(seed, k as u64);
            let len = MC_CHUNK.min(samples - k * MC_CHUNK);
            let mut hit = 0usize;
            for _ in 0..len {
                let sigma: f64 = rng.random_range(-l..l);
                let s = sigma.exp();
                let ((y1, r1), _) = two_balls(b, b1, s, eps).expect("alpha != 1");
                let y = y1 + unit_ball_point(&mut rng, n) * r1;
                if y.norm() <= m {
                    let c = CParam { s, y };
                    if alpha2(b, b1, &c)?.abs() < eps {
                        hit += 1;
                    }
                }
            }
            Ok(hit)
        })
        .collect();
    let mut total = 0usize;
    for h in hits {
        total += h?;
    }
    let ((_, r1), _) = two_balls(b, b1, 1.0, eps).expect("alpha != 1");
    let vol = 2.0 * l * ball_volume(n) * r1.powi(n as i32);
    let p = total as f64 / samples as f64;
    Ok((vol * p, vol * (p * (1.0 - p) / samples as f64).sqrt()))
}

/// Outcome of the Monte-Carlo comparison against the analytic bound.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasureReport {
    pub bound: f64,
    /// max over pairs of (estimate + 2.576·standard error)/bound.
    pub ratio: f64,
    pub estimates: Vec<f64>,
    /// Points whose membership in Z disagrees with the two-ball description.
    pub two_ball_mismatches: usize,
    /// max |y₁ − y₂|/(r₁ − r₂); the smaller ball is inside the larger one iff this is < 1.
    pub containment: f64,
}

/// Parameters of one measure check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeasureParams {
    pub n: usize,
    pub m: f64,
    pub delta: f64,
    pub eps: f64,
    pub samples: usize,
    pub seed: u64,
    pub pairs: usize,
}

/// Sampled (b, b₁) with α ≤ 0.9 and |α₁| ≥ δ.
pub fn measure_pairs(n: usize, delta: f64, pairs: usize, seed: u64) -> Vec<(BParam, BParam)> {
    (0..pairs)
        .map(|k| {
            let mut rng = stream_rng(seed ^ 0x5eed_0000, k as u64);
            let b = loop {
                let b = sample_b(&mut rng, n);
                if b.alpha <= 0.9 {
                    break b;
                }
            };
            let b1 = sample_b_guarded(&mut rng, n, delta);
            (b, b1)
        })
        .collect()
}

/// Compares MC estimates of μ with the analytic bound and checks the two-ball description.
pub fn measure_bound_check(p: &MeasureParams) -> Result<MeasureReport> {
    let bound = measure_bound(p.n, p.m, p.delta, p.eps)?;
    let pairs = measure_pairs(p.n, p.delta, p.pairs, p.seed);
    let mut ratio = 0.0f64;
    let mut estimates = Vec::new();
    let mut mismatches = 0usize;
    let mut containment = 0.0f64;
    for (k, (b, b1)) in pairs.iter().enumerate() {
        let (est, se) = mu_estimate(b, b1, p.m, p.eps, p.samples, p.seed.wrapping_add(k as u64 * 7919))?;
        ratio = ratio.max((est + 2.576 * se) / bound);
        estimates.push(est);
        let mut rng = stream_rng(p.seed ^ 0xba11, k as u64);
        let l = p.m.ln();
        for _ in 0..p.samples.min(20_000) {
            let s = rng.random_range(-l..l).exp();
            let ((y1, r1), (y2, r2)) = two_balls(b, b1, s, p.eps).expect("alpha != 1");
            containment = containment.max((&y1 - &y2).norm() / (r1 - r2));
            let y = &y1 + unit_ball_point(&mut rng, p.n) * (2.0 * r1);
            let d1 = (&y - &y1).norm() - r1;
            let d2 = (&y - &y2).norm() - r2;
            let a2 = alpha2(b, b1, &CParam { s, y })?;
            // Skip points within roundoff of a boundary.
            if d1.abs() < 1e-9 || d2.abs() < 1e-9 || (a2.abs() - p.eps).abs() < 1e-12 {
                continue;
            }
            if (a2.abs() < p.eps) != (d1 < 0.0 && d2 > 0.0) {
                mismatches += 1;
            }
        }
    }
    Ok(MeasureReport {
        bound,
        ratio,
        estimates,
        two_ball_mismatches: mismatches,
        containment,
    })
}

/// Least-squares slope of log μ against log ε with common random numbers across ε.
pub fn eps_exponent(n: usize, m: f64, delta: f64, eps: &[f64], samples: usize, seed: u64, pairs: usize) -> Result<f64> {
    let ps = measure_pairs(n, delta, pairs, seed);
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for &e in eps {
        check_measure_params(m, delta, e)?;
        let mut total = 0.0;
        for (k, (b, b1)) in ps.iter().enumerate() {
            total += mu_estimate(b, b1, m, e, samples, seed.wrapping_add(k as u64 * 7919))?.0;
        }
        if !(total > 0.0) {
            return Err(Error::Domain(format!("no Monte-Carlo hits at eps = {e}")));
        }
        xs.push(e.ln());
        ys.push(total.ln());
    }
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    Ok(sxy / sxx)
}

/// Bound, two-ball and scaling residuals over a grid of (M, δ) and ε = fraction·δ.
pub fn measure_residuals(
    n: usize,
    seed: u64,
    samples: usize,
    grid: &[(f64, f64)],
    eps_fracs: &[f64],
) -> Result<Vec<Residual>> {
    let pairs = 4;
    let mut out = Vec::new();
    for &(m, delta) in grid {
        for &f in eps_fracs {
            let eps = f * delta;
            let r = measure_bound_check(&MeasureParams {
                n,
                m,
                delta,
                eps,
                samples,
                seed,
                pairs,
            })?;
            let tag = format!("M{m}_delta{delta}_eps{eps}");
            out.push(Residual::new(format!("measure_bound_{tag}"), r.ratio, samples * pairs, None, 1.0));
            out.push(Residual::new(
                format!("measure_two_ball_{tag}"),
                r.two_ball_mismatches as f64,
                samples.min(20_000) * pairs,
                None,
                0.0,
            ));
            out.push(Residual::new(
                format!("measure_containment_{tag}"),
                r.containment,
                samples.min(20_000) * pairs,
                None,
                1.0,
            ));
        }
        let eps: Vec<f64> = eps_fracs.iter().map(|f| f * delta).collect();
        if eps.len() >= 2 {
            let p = eps_exponent(n, m, delta, &eps, samples, seed, pairs)?;
            out.push(Residual::new(
                format!("measure_eps_exponent_M{m}_delta{delta}"),
                (p - 1.0).abs(),
                samples * pairs * eps.len(),
                None,
                0.2,
            ));
        }
    }
    Ok(out)
}

/// p_λ(s, y) = s^{ιλ}.
pub fn character(lambda: f64, c: &CParam) -> Complex64 {
    (I * lambda * c.s.ln()).exp()
}

/// The relations δ_L, δ_R, their twisted versions and the affine action on 𝔟⁰.
pub fn minkowski_action(cfg: &OpCheck) -> Result<Vec<Residual>> {
    let n = cfg.n;
    let d = n + 1;

    let coassoc = par_max(cfg.samples, |i| {
        let mut rng = cfg.rng(80, i);
        let c = sample_c(&mut rng, n);
        let (b, bp) = (sample_b(&mut rng, n), sample_b(&mut rng, n));
        // (δ₀×id)δ_L = (id×δ_L)δ_L: g with c_L(g) = c, g′ with c_L(g′) = c_R(g).
        let g = embed_c(&c).mul(&embed_b(&b));
        let fg = factor_bc(&g)?;
        let gp = embed_c(&fg.c).mul(&embed_b(&bp));
        let prod = embed_b(&fg.b).mul(&embed_c(&fg.c)).mul(&embed_b(&bp));
        let mut m = c_l(&prod)?.dist(&c).max(c_r(&prod)?.dist(&c_r(&gp)?));
        // (id×δ₀)δ_R = (δ_R×id)δ_R: g with c_R(g) = c, g′ with c_R(g′) = c_L(g).
        let g = bc(&b, &c);
        let fg = factor_cb(&g)?;
        let gp = bc(&bp, &fg.c);
        let prod = embed_b(&bp).mul(&embed_c(&fg.c)).mul(&embed_b(&fg.b));
        m = m.max(c_l(&prod)?.dist(&c_l(&gp)?)).max(c_r(&prod)?.dist(&c));
        Ok(m)
    })?;

    let flip = par_max(cfg.samples, |i| {
        let mut rng = cfg.rng(81, i);
        let c = sample_c(&mut rng, n);
        let b = sample_b(&mut rng, n);
        // δ_R(c⁻¹) ∋ (c_L(g), g) with c_R(g) = c⁻¹; inverting and flipping lands in δ_L(c).
        let g = bc(&b, &c_inv(&c));
        let h = g.inverse();
        Ok(c_l(&h)?.dist(&c).max(c_r(&h)?.dist(&c_inv(&c_l(&g)?))))
    })?;

    let affine = par_max(cfg.samples, |i| {
        let mut rng = cfg.rng(82, i);
        let b = sample_b(&mut rng, n);
        let psi = gaussian_vec(&mut rng, d);
        let cdot = gaussian_vec(&mut rng, d);
        // d/dt c_R(exp(tċ)b) = Ad^𝔠(b⁻¹)ċ, paired against ψ.
        let h = cfg.h;
        let path = |t: f64| -> Result<DVector<f64>> {
            Ok(log_c(&c_r(&embed_c(&c_exp(&(&cdot * t))).mul(&embed_b(&b)))?).basis_coeffs())
        };
        let v = central_diff(h, &path)?;
        let sharp = crate::relations::ad_sharp(&b);
        Ok((psi.dot(&v) - (&sharp * &psi).dot(&cdot)).abs())
    })?;

    let sets = par_max(cfg.samples, |i| {
        let mut rng = cfg.rng(83, i);
        let b2 = sample_b_guarded(&mut rng, n, SAMPLE_GUARD);
        let b3 = sample_b_guarded(&mut rng, n, SAMPLE_GUARD);
        let ct3i = c_inv(&ct_l(&b3)?);
        // T^C₁₂(δ_R×id)T^C against T₂₃(id×δ₀)T^C on the common legs (b₂c̃_L(b₃)⁻¹, b₃).
        let lhs = c_mul(&c_inv(&ct_l(&b2)?), &c_l(&bc(&b2, &ct3i))?);
        let prod = b_r(&b2, &ct3i)?.mul(&b3);
        let rhs = c_inv(&ct_l(&prod)?);
        let mut m = lhs.dist(&rhs);
        // b_R(b₂c̃_L(b₃)⁻¹)b₃ = b_R(a_R(b₂)a_R(b₃)) ∈ B′.
        let a23 = a_mul(&ca_project(&b2)?.a, &ca_project(&b3)?.a)?;
        m = m.max(prod.dist(&a_factor(&a23).b));
        // (δ_R×id)T^C: the middle leg has c_R = c̃_L(b₃)⁻¹.
        m = m.max(c_r(&bc(&b2, &ct3i))?.dist(&ct3i));
        Ok(m)
    })?;

    let twisted = par_max(cfg.samples, |i| {
        let mut rng = cfg.rng(84, i);
        let g = loop {
            let g = sample_g_point(&mut rng, n, SAMPLE_GUARD);
            if gb_ends(&g)?.1.alpha.abs() >= SAMPLE_GUARD {
                break g;
            }
        };
        let gm = g.matrix();
        let (_, br) = gb_ends(&g)?;
        // c_L(g)c̃_L(b_R(g)) = c̃_L(g), so Ad_{T^C}δ_R has first leg c̃_L(b_L(g))⁻¹c̃_L(g).
        let lhs = c_mul(&c_l(&gm)?, &ct_l(&br)?);
        let ctg = factor_ca(&gm)?.c;
        let mut m = lhs.dist(&ctg);
        let conj = c_mul(&c_mul(&c_inv(&ct_l(&g.b)?), &c_l(&gm)?), &ct_l(&br)?);
        m = m.max(conj.dist(&c_mul(&c_inv(&ct_l(&g.b)?), &ctg)));
        Ok(m)
    })?;

    let chars = par_max(cfg.samples, |i| {
        let mut rng = cfg.rng(85, i);
        let (c1, c2) = (sample_c(&mut rng, n), sample_c(&mut rng, n));
        let lambda = rng.random_range(-5.0..5.0);
        Ok((character(lambda, &c_mul(&c1, &c2)) - character(lambda, &c1) * character(lambda, &c2)).norm())
    })?;

    Ok(vec![
        Residual::new("minkowski_coassociativity", coassoc, cfg.samples, None, cfg.tol_exact),
        Residual::new("minkowski_flip", flip, cfg.samples, None, cfg.tol_exact),
        Residual::new("minkowski_affine_action", affine, cfg.samples, Some(cfg.h), cfg.tol_fd),
        Residual::new("minkowski_twist_sets", sets, cfg.samples, None, cfg.tol_exact),
        Residual::new("minkowski_twisted_coaction", twisted, cfg.samples, None, cfg.tol_exact),
        Residual::new("minkowski_characters", chars, cfg.samples, None, cfg.tol_exact),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::groups::exp_c;
    use nalgebra::dvector;

    fn small() -> OpCheck {
        let mut c = OpCheck::new(2, 7, 6);
        c.funcs = 2;
        c
    }

    fn assert_all_pass(rs: &[Residual]) {
        for r in rs {
            assert!(r.pass, "{} residual {:e} > {:e}", r.name, r.residual, r.tol);
        }
    }

    fn b_with(n: usize, alpha: f64) -> BParam {
        // A rotation in the (e_n, e_{n+1}) plane.
        let sn = (1.0 - alpha * alpha).sqrt();
        let mut lam = DMatrix::identity(n, n);
        lam[(n - 1, n - 1)] = alpha;
        let mut u = DVector::zeros(n);
        u[n - 1] = sn;
        let mut w = DVector::zeros(n);
        w[n - 1] = -sn;
        BParam { lam, u, w, alpha }
    }

    #[test]
    fn d_coeffs_examples() {
        let d = d_coeffs(&BParam::identity(2)).unwrap();
        assert!(d.0.amax() < 1e-15);
        let b = b_with(1, 0.6);
        assert!(b.constraint_residual() < 1e-14);
        let d = d_coeffs(&b).unwrap();
        assert!((d.0[0] - (5.0f64 / 3.0).ln()).abs() < 1e-12);
        assert!((d.0[1] - (-(0.6f64.ln() / (0.6 - 1.0)) * 0.8)).abs() < 1e-12);
        assert!((d.0[0] - 0.5108).abs() < 1e-4 && (d.0[1] + 1.0217).abs() < 1e-4);
        // Both sides of the series switch agree with the exact log ratio.
        for x in [1.0 - 2e-4, 1.0 - 5e-5, 1.0 - 1e-8] {
            let b = b_with(1, x);
            let d = d_coeffs(&b).unwrap();
            let ratio = -d.0[1] / b.u[0];
            let reference = (x - 1.0).ln_1p() / (x - 1.0);
            assert!((ratio - reference).abs() < 1e-12, "{x}: {ratio} vs {reference}");
        }
        assert!(d_coeffs(&b_with(2, 0.0)).is_err());
    }

    #[test]
    fn c_t_consistency_and_explicit_example() {
        let b = b_with(1, 0.6);
        for t in [-1.0, 0.3, 2.0] {
            let ct = c_t(t, &b).unwrap();
            assert!((ct.s - 0.6f64.powf(-t)).abs() < 1e-12);
            let d = d_coeffs(&b).unwrap();
            let via_exp = exp_c(&crate::groups::CLieParam::from_basis_coeffs(&(&d.0 * -t)));
            assert!(ct.dist(&via_exp) < 1e-12);
        }
        let g1 = GroupoidPoint::new(BParam::identity(1), CParam::new(1.3, dvector![0.2]).unwrap());
        let g2 = GroupoidPoint::unit(b.clone());
        let (a, _) = twist_apply(0.0, &g1, &g2).unwrap();
        assert!(a.dist(&g1) < 1e-14);
        let (a, _) = twist_apply(1.0, &GroupoidPoint::unit(BParam::identity(1)), &g2).unwrap();
        assert!((a.c.s - 1.0 / 0.6).abs() < 1e-12);
        assert!((a.c.y[0] - 0.8 / 0.6).abs() < 1e-12);
        assert!(twist_apply(1.0, &g1, &GroupoidPoint::unit(b_with(1, 0.0))).is_err());
    }

    #[test]
    fn twist_point_invariants() {
        let p = TwistPoint::new(0.7, BParam::identity(2), b_with(2, -0.4)).unwrap();
        assert!(p.invariant_residual().unwrap() < 1e-15);
    }

    #[test]
    fn group_checks_small() {
        assert_all_pass(&twist_group_checks(&small()).unwrap());
    }

    #[test]
    fn cocycle_small() {
        assert_all_pass(&cocycle_check(&small()).unwrap());
    }

    #[test]
    fn cocycle_degenerate_units() {
        // b₂ = b₃ = e: both sides reduce to b₁c̃_L(e)⁻¹ = b₁.
        let e = BParam::identity(2);
        assert!(ct_l(&e).unwrap().dist(&CParam::identity(2)) < 1e-15);
    }

    #[test]
    fn delta_small() {
        assert_all_pass(&delta_twisted_check(&small()).unwrap());
    }

    #[test]
    fn generator_small() {
        assert_all_pass(&twist_generator_check(&small()).unwrap());
    }

    #[test]
    fn generator_vanishes_where_twist_is_trivial() {
        let mut rng = stream_rng(3, 0);
        let g1 = sample_g_point(&mut rng, 2, 0.0);
        let g2 = GroupoidPoint::new(BParam::identity(2), sample_c(&mut rng, 2));
        let f = PairFn::random(&mut rng, &g1, &g2, 2);
        assert!(twist_generator_apply(&f, &g1, &g2, 1e-5).unwrap().norm() < 1e-12);
        assert!(twist_generator_factorized(&f, &g1, &g2, 1e-5).unwrap().norm() < 1e-12);
    }

    #[test]
    fn minkowski_small() {
        assert_all_pass(&minkowski_action(&small()).unwrap());
    }

    #[test]
    fn coactions_trivialize_on_c() {
        let c = CParam::new(2.5, dvector![0.3, -1.1]).unwrap();
        let g = embed_c(&c);
        assert!(c_l(&g).unwrap().dist(&c) < 1e-12);
        assert!(c_r(&g).unwrap().dist(&c) < 1e-12);
        let b = sample_b(&mut stream_rng(9, 0), 2);
        let e = CParam::identity(2);
        assert!(c_l(&embed_b(&b)).unwrap().dist(&e) < 1e-12);
        assert!(c_r(&embed_b(&b)).unwrap().dist(&e) < 1e-12);
    }

    #[test]
    fn measure_bound_shape() {
        assert!(measure_bound(1, 10.0, 0.5, 0.5).is_err());
        assert!(measure_bound(1, 10.0, 0.5, 0.6).is_err());
        assert!(measure_bound(1, 1.0, 0.5, 0.1).is_err());
        let (m, d, e) = (10.0f64, 0.5, 0.05);
        let b = measure_bound(1, m, d, e).unwrap();
        assert!((b - 8.0 * e * m.ln() / (d * (d - e))).abs() < 1e-12);
        assert!((ball_volume(2) - std::f64::consts::PI).abs() < 1e-15);
        assert!((ball_volume(3) - 4.0 / 3.0 * std::f64::consts::PI).abs() < 1e-14);
    }

    #[test]
    fn alpha_one_has_empty_z() {
        let b = BParam::identity(2);
        let mut rng = stream_rng(5, 0);
        let b1 = sample_b_guarded(&mut rng, 2, 0.5);
        for _ in 0..200 {
            let c = sample_c(&mut rng, 2);
            assert!(alpha2(&b, &b1, &c).unwrap().abs() >= 0.5 - 1e-12);
        }
        assert!(two_balls(&b, &b1, 1.0, 0.1).is_none());
        assert_eq!(mu_estimate(&b, &b1, 10.0, 0.1, 100, 1).unwrap(), (0.0, 0.0));
    }

    #[test]
    fn measure_small() {
        let p = MeasureParams {
            n: 1,
            m: 10.0,
            delta: 0.5,
            eps: 0.05,
            samples: 20_000,
            seed: 1,
            pairs: 2,
        };
        let r = measure_bound_check(&p).unwrap();
        assert!(r.ratio < 1.0, "{r:?}");
        assert_eq!(r.two_ball_mismatches, 0);
        assert!(r.containment < 1.0);
        assert!(r.estimates.iter().all(|&e| e > 0.0), "{r:?}");
        // Determinism of the chunked reduction.
        assert_eq!(measure_bound_check(&p).unwrap(), r);
    }
}
