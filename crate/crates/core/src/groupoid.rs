//! The groupoid G_B ⇉ B, its Γ₀/Γ₁ splitting and charts, and the isomorphic groupoid Γ_A.

use crate::decomp::{a_factor, b_r, ca_project, factor_ca, swap_bc_to_cb, B_PRIME_GUARD};
use crate::error::{Error, Result};
use crate::groups::{c_inv, c_mul, embed_a, embed_b, embed_c, AParam, BParam, CParam};
use crate::minkalg::GroupMatrix;
use nalgebra::{DMatrix, DVector};

/// Ends closer than this compose; the right end is snapped to the next left end.
pub const COMPOSE_TOL: f64 = 1e-8;

/// The point b·c of G_B.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupoidPoint {
    pub b: BParam,
    pub c: CParam,
}

/// The point a·c of Γ_A.
#[derive(Debug, Clone, PartialEq)]
pub struct AGroupoidPoint {
    pub a: AParam,
    pub c: CParam,
}

/// Coordinates (K; t, x₁, x₂) on Γ₀ = O(n)⁻ × ℝ₊ × ℝⁿ × ℝⁿ.
#[derive(Debug, Clone, PartialEq)]
pub struct Gamma0Coord {
    pub k: DMatrix<f64>,
    pub t: f64,
    pub x1: DVector<f64>,
    pub x2: DVector<f64>,
}

impl GroupoidPoint {
    pub fn new(b: BParam, c: CParam) -> Self {
        GroupoidPoint { b, c }
    }

    pub fn unit(b: BParam) -> Self {
        let n = b.n();
        GroupoidPoint {
            b,
            c: CParam::identity(n),
        }
    }

    pub fn n(&self) -> usize {
        self.b.n()
    }

    pub fn matrix(&self) -> GroupMatrix {
        embed_b(&self.b).mul(&embed_c(&self.c))
    }

    pub fn dist(&self, other: &GroupoidPoint) -> f64 {
        self.b.dist(&other.b).max(self.c.dist(&other.c))
    }
}

impl AGroupoidPoint {
    pub fn matrix(&self) -> GroupMatrix {
        embed_a(&self.a).mul(&embed_c(&self.c))
    }

    pub fn dist(&self, other: &AGroupoidPoint) -> f64 {
        let da = (&self.a.z - &other.a.z)
            .amax()
            .max((&self.a.u - &other.a.u).amax())
            .max((self.a.d - other.a.d).abs());
        da.max(self.c.dist(&other.c))
    }
}

/// (b_L, b_R) of a point.
pub fn gb_ends(g: &GroupoidPoint) -> Result<(BParam, BParam)> {
    let right = swap_bc_to_cb(&g.b, &g.c)?.b;
    Ok((g.b.clone(), right))
}

pub fn gb_compose(g1: &GroupoidPoint, g2: &GroupoidPoint) -> Result<GroupoidPoint> {
    let (_, r1) = gb_ends(g1)?;
    let gap = r1.dist(&g2.b);
    if gap > COMPOSE_TOL {
        return Err(Error::NotComposable(gap));
    }
    Ok(GroupoidPoint {
        b: g1.b.clone(),
        c: c_mul(&g1.c, &g2.c),
    })
}

pub fn gb_inverse(g: &GroupoidPoint) -> Result<GroupoidPoint> {
    let (_, r) = gb_ends(g)?;
    Ok(GroupoidPoint {
        b: r,
        c: c_inv(&g.c),
    })
}

/// (Bc₀)(bc) = b_R(b·c₀⁻¹)·c₀·c.
pub fn bisection_apply(c0: &CParam, g: &GroupoidPoint) -> Result<GroupoidPoint> {
    Ok(GroupoidPoint {
        b: b_r(&g.b, &c_inv(c0))?,
        c: c_mul(c0, &g.c),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Component {
    Gamma0,
    Gamma1,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Isotropy {
    /// The isotropy group of the left end is all of C.
    WholeC,
    /// The isotropy group is the one-parameter curve (s, (s−1)w/(1−α)).
    HalfLine,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Classification {
    pub component: Component,
    pub in_b_prime: bool,
    pub isotropy: Isotropy,
    /// Whether g itself lies in the isotropy group of its left end.
    pub fixes_end: bool,
}

pub fn classify(g: &GroupoidPoint) -> Result<Classification> {
    let b = &g.b;
    let gamma1 = (b.alpha - 1.0).abs() < 1e-10 && b.u.norm() < 1e-10;
    let (_, right) = gb_ends(g)?;
    let in_b_prime = b.alpha.abs() >= B_PRIME_GUARD && right.alpha.abs() >= B_PRIME_GUARD;
    if gamma1 {
        return Ok(Classification {
            component: Component::Gamma1,
            in_b_prime,
            isotropy: Isotropy::WholeC,
            fixes_end: true,
        });
    }
    let curve = &b.w * ((g.c.s - 1.0) / (1.0 - b.alpha));
    let scale = 1.0 + g.c.y.amax();
    Ok(Classification {
        component: Component::Gamma0,
        in_b_prime,
        isotropy: Isotropy::HalfLine,
        fixes_end: (&g.c.y - curve).amax() < 1e-9 * scale,
    })
}

/// R(v): the reflection of ℝ^{n+1} along (v, −1).
pub fn reflection(v: &DVector<f64>) -> DMatrix<f64> {
    let n = v.len();
    let q = 1.0 + v.norm_squared();
    let mut r = DMatrix::zeros(n + 1, n + 1);
    let top = DMatrix::identity(n, n) - v * v.transpose() * (2.0 / q);
    r.view_mut((0, 0), (n, n)).copy_from(&top);
    for k in 0..n {
        r[(k, n)] = 2.0 * v[k] / q;
        r[(n, k)] = 2.0 * v[k] / q;
    }
    r[(n, n)] = (v.norm_squared() - 1.0) / q;
    r
}

/// Φ(K, v) = (K ⊕ 1)·R(v).
pub fn phi_chart(k: &DMatrix<f64>, v: &DVector<f64>) -> BParam {
    let n = v.len();
    let mut kk = DMatrix::identity(n + 1, n + 1);
    kk.view_mut((0, 0), (n, n)).copy_from(k);
    BParam::from_block(&(kk * reflection(v)))
}

/// Ψ(Λ, u, w, α) = (Λ − uwᵗ/(α−1), w/(1−α)), the inverse of Φ.
pub fn psi_chart(b: &BParam) -> Result<(DMatrix<f64>, DVector<f64>)> {
    if (b.alpha - 1.0).abs() < 1e-12 {
        return Err(Error::Domain("alpha = 1 lies in Gamma_1".into()));
    }
    let k = &b.lam - &b.u * b.w.transpose() / (b.alpha - 1.0);
    let v = &b.w / (1.0 - b.alpha);
    Ok((k, v))
}

/// The transitive action (v; s, y) ↦ sv − y on Γ₀₀.
pub fn gamma00_action(v: &DVector<f64>, c: &CParam) -> DVector<f64> {
    v * c.s - &c.y
}

/// Φ(K, v)(s, y) = (s̃, ỹ)Φ(K, sv − y).
pub fn gamma00_swap(
    k: &DMatrix<f64>,
    v: &DVector<f64>,
    c: &CParam,
) -> (CParam, (DMatrix<f64>, DVector<f64>)) {
    let s = c.s;
    let y = &c.y;
    let vp = gamma00_action(v, c);
    let q = 1.0 + v.norm_squared();
    let st = (1.0 + vp.norm_squared()) / (s * q);
    let inner = v.dot(y) + (s * s - y.norm_squared() - 1.0) / (2.0 * s);
    let yt = k * (y - v * (2.0 * inner / q));
    (CParam { s: st, y: yt }, (k.clone(), vp))
}

/// (t; x₁, x₂) ↦ (x₁; t, t·x₁ − x₂).
pub fn gamma00_split(t: f64, x1: &DVector<f64>, x2: &DVector<f64>) -> (DVector<f64>, CParam) {
    (
        x1.clone(),
        CParam {
            s: t,
            y: x1 * t - x2,
        },
    )
}

/// (v; s, y) ↦ (s; v, sv − y).
pub fn gamma00_join(v: &DVector<f64>, c: &CParam) -> (f64, DVector<f64>, DVector<f64>) {
    (c.s, v.clone(), gamma00_action(v, c))
}

/// Γ₀ coordinates of a point with α ≠ 1.
pub fn to_gamma0(g: &GroupoidPoint) -> Result<Gamma0Coord> {
    let (k, v) = psi_chart(&g.b)?;
    let (t, x1, x2) = gamma00_join(&v, &g.c);
    Ok(Gamma0Coord { k, t, x1, x2 })
}

pub fn from_gamma0(p: &Gamma0Coord) -> GroupoidPoint {
    let (v, c) = gamma00_split(p.t, &p.x1, &p.x2);
    GroupoidPoint {
        b: phi_chart(&p.k, &v),
        c,
    }
}

/// ac ↦ b_R(a)·c.
pub fn gamma_a_iso(p: &AGroupoidPoint) -> GroupoidPoint {
    GroupoidPoint {
        b: a_factor(&p.a).b,
        c: p.c.clone(),
    }
}

/// bc ↦ a_R(b)·c, defined when both ends lie in B′.
pub fn gamma_a_iso_inv(g: &GroupoidPoint) -> Result<AGroupoidPoint> {
    let (_, right) = gb_ends(g)?;
    if right.alpha.abs() < B_PRIME_GUARD {
        return Err(Error::Domain("right end not in B'".into()));
    }
    Ok(AGroupoidPoint {
        a: ca_project(&g.b)?.a,
        c: g.c.clone(),
    })
}

/// (a_L, a_R) of a point of Γ_A.
pub fn ga_ends(p: &AGroupoidPoint) -> Result<(AParam, AParam)> {
    Ok((p.a.clone(), factor_ca(&p.matrix())?.a))
}

pub fn ga_compose(p1: &AGroupoidPoint, p2: &AGroupoidPoint) -> Result<AGroupoidPoint> {
    let (_, r1) = ga_ends(p1)?;
    let gap = (&r1.z - &p2.a.z)
        .amax()
        .max((&r1.u - &p2.a.u).amax())
        .max((r1.d - p2.a.d).abs());
    if gap > COMPOSE_TOL {
        return Err(Error::NotComposable(gap));
    }
    Ok(AGroupoidPoint {
        a: p1.a.clone(),
        c: c_mul(&p1.c, &p2.c),
    })
}

pub fn ga_inverse(p: &AGroupoidPoint) -> Result<AGroupoidPoint> {
    let (_, r) = ga_ends(p)?;
    Ok(AGroupoidPoint {
        a: r,
        c: c_inv(&p.c),
    })
}

/// G_B as the transformation groupoid B ⋊ C: the point bc is the pair (b, c).
pub fn transgroupoid_iso(g: &GroupoidPoint) -> (BParam, CParam) {
    (g.b.clone(), g.c.clone())
}

/// The right action (b, c) ↦ b_R(bc) of C on B.
pub fn b_action(b: &BParam, c: &CParam) -> Result<BParam> {
    b_r(b, c)
}
