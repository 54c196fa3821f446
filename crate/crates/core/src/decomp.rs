//! Factorizations G = BC = CB and the CA decomposition over B′ = {α ≠ 0}.

use crate::error::{Error, Result};
use crate::groups::{c_inv, embed_a, embed_b, embed_c, recover_a, AParam, BParam, CParam};
use crate::minkalg::GroupMatrix;
use nalgebra::{DMatrix, DVector};

/// Threshold below which |α| counts as outside B′.
pub const B_PRIME_GUARD: f64 = 1e-12;

/// g = b·c.
#[derive(Debug, Clone, PartialEq)]
pub struct BCFactors {
    pub b: BParam,
    pub c: CParam,
}

/// g = c·b, together with the scalar M (or M̃) of the swap formulas.
#[derive(Debug, Clone, PartialEq)]
pub struct CBFactors {
    pub c: CParam,
    pub b: BParam,
    pub m: f64,
}

/// g = c̃_L(g)·a_R(g).
#[derive(Debug, Clone, PartialEq)]
pub struct CAFactors {
    pub c: CParam,
    pub a: AParam,
}

impl BCFactors {
    pub fn matrix(&self) -> GroupMatrix {
        embed_b(&self.b).mul(&embed_c(&self.c))
    }
}

impl CBFactors {
    pub fn matrix(&self) -> GroupMatrix {
        embed_c(&self.c).mul(&embed_b(&self.b))
    }
}

impl CAFactors {
    pub fn matrix(&self) -> GroupMatrix {
        embed_c(&self.c).mul(&embed_a(&self.a))
    }
}

/// The scalar M of the BC → CB swap in its regular (expanded) form.
pub fn swap_m(b: &BParam, c: &CParam) -> f64 {
    let s = c.s;
    let y2 = c.y.norm_squared();
    let q = (1.0 + y2) / (s * s);
    0.5 * (q + 1.0) - 0.5 * b.alpha * (q - 1.0) - b.w.dot(&c.y) / s
}

/// The same scalar written as |·|²/(2(1−α)); undefined at α = 1.
pub fn swap_m_quadratic(b: &BParam, c: &CParam) -> f64 {
    let s = c.s;
    let k = (1.0 - b.alpha) / s;
    let v = &b.w - &c.y * k;
    (k * k + v.norm_squared()) / (2.0 * (1.0 - b.alpha))
}

/// Solves b·c = c̃·b̃ for (c̃, b̃).
pub fn swap_bc_to_cb(b: &BParam, c: &CParam) -> Result<CBFactors> {
    let s = c.s;
    let y = &c.y;
    let alpha = b.alpha;
    let m = swap_m(b, c);
    if !(m > 0.0) {
        return Err(Error::Invariant {
            what: "swap scalar M > 0".into(),
            residual: -m,
        });
    }
    let y2 = y.norm_squared();
    let ms = m * s;
    let lam_y = &b.lam * y;
    let wy = b.w.dot(y);
    let st = ms;
    let yt = &lam_y - &b.u * ((s * s - 1.0 - y2) / (2.0 * s));
    let v = &b.w - y * ((1.0 - alpha) / s);
    let ut = (&b.u * (1.0 - wy / s) - &lam_y * ((1.0 - alpha) / s)) / ms;
    let wt = &v / ms;
    let at = 1.0 - (1.0 - alpha) / (m * s * s);
    // Λ̃ = Λ + u yᵗ/s + ỹ vᵗ/s̃ equals the printed product form but stays regular at α = 1.
    let lt = &b.lam + &b.u * y.transpose() / s + &yt * v.transpose() / st;
    Ok(CBFactors {
        c: CParam { s: st, y: yt },
        b: BParam {
            lam: lt,
            u: ut,
            w: wt,
            alpha: at,
        },
        m,
    })
}

/// The scalar M̃ of the CB → BC swap in its regular form.
pub fn swap_mtilde(c: &CParam, b: &BParam) -> f64 {
    let q = c.s * c.s + c.y.norm_squared();
    (q + 1.0) / 2.0 - b.alpha * (q - 1.0) / 2.0 + b.u.dot(&c.y)
}

pub fn swap_mtilde_quadratic(c: &CParam, b: &BParam) -> f64 {
    let k = 1.0 - b.alpha;
    let q = &b.u + &c.y * k;
    (c.s * c.s * k * k + q.norm_squared()) / (2.0 * k)
}

/// Solves c̃·b̃ = b·c for (b, c).
pub fn swap_cb_to_bc(c: &CParam, b: &BParam) -> Result<BCFactors> {
    let st = c.s;
    let yt = &c.y;
    let at = b.alpha;
    let mt = swap_mtilde(c, b);
    if !(mt > 0.0) {
        return Err(Error::Invariant {
            what: "swap scalar M~ > 0".into(),
            residual: -mt,
        });
    }
    let h = (st * st + yt.norm_squared() - 1.0) / 2.0;
    let uy = b.u.dot(yt);
    let q = &b.u + yt * (1.0 - at);
    let lty = b.lam.transpose() * yt;
    let s = st / mt;
    let y = (&lty - &b.w * h) / mt;
    let u = &q * (st / mt);
    let w = (&lty * (1.0 - at) + &b.w * (1.0 + uy)) * (st / mt);
    let corr = yt * b.w.transpose() * (1.0 + uy) - &b.u * b.w.transpose() * h
        + &q * (yt.transpose() * &b.lam);
    let lam = &b.lam - corr / mt;
    let alpha = 1.0 - st * st * (1.0 - at) / mt;
    Ok(BCFactors {
        b: BParam {
            lam,
            u,
            w,
            alpha,
        },
        c: CParam { s, y },
    })
}

/// Reads g = b·c off the matrix: s = 1/(g₀₀ − g_{0,n+1}), y = −s·g_{0,1..n}.
pub fn factor_bc(g: &GroupMatrix) -> Result<BCFactors> {
    let n = g.n;
    let den = g.m[(0, 0)] - g.m[(0, n + 1)];
    if !(den > 0.0) {
        return Err(Error::Domain(format!(
            "extracted s is not positive (denominator {den})"
        )));
    }
    let s = 1.0 / den;
    let y = DVector::from_fn(n, |k, _| -s * g.m[(0, k + 1)]);
    let c = CParam { s, y };
    let bm = &g.m * embed_c(&c_inv(&c)).m;
    let b = BParam::from_block(&bm.view((1, 1), (n + 1, n + 1)).into_owned());
    Ok(BCFactors { b, c })
}

/// Reads g = c·b off the matrix: s = g₀₀ + g_{n+1,0}, y = −g_{1..n,0}.
pub fn factor_cb(g: &GroupMatrix) -> Result<CBFactors> {
    let n = g.n;
    let s = g.m[(0, 0)] + g.m[(n + 1, 0)];
    if !(s > 0.0) {
        return Err(Error::Domain(format!("extracted s = {s} is not positive")));
    }
    let y = DVector::from_fn(n, |k, _| -g.m[(k + 1, 0)]);
    let c = CParam { s, y };
    let bm = embed_c(&c_inv(&c)).m * &g.m;
    let b = BParam::from_block(&bm.view((1, 1), (n + 1, n + 1)).into_owned());
    Ok(CBFactors { c, b, m: f64::NAN })
}

/// Reads g = c̃·a off the matrix using A·e_{n+1} = d·e_{n+1}.
pub fn factor_ca(g: &GroupMatrix) -> Result<CAFactors> {
    let n = g.n;
    let l = n + 1;
    let t = g.m[(0, l)] + g.m[(l, l)];
    if t.abs() < B_PRIME_GUARD {
        return Err(Error::Domain("element has no CA factorization".into()));
    }
    let d = t.signum();
    let s = t.abs();
    let y = DVector::from_fn(n, |k, _| -d * g.m[(k + 1, l)]);
    let c = CParam { s, y };
    let am = embed_c(&c_inv(&c)).mul(g);
    let a = recover_a(&am)?;
    Ok(CAFactors { c, a })
}

/// The factorization a = C(s, y)·B(b) of an element of A in closed form.
pub fn a_factor(a: &AParam) -> CBFactors {
    let z = &a.z;
    let z2 = z.norm_squared();
    let n = a.n();
    let ud = &a.u * a.dmat();
    let s = (1.0 + z2) / (1.0 - z2);
    let y = z * (-2.0 / (1.0 - z2));
    let lam = (DMatrix::identity(n, n) - z * z.transpose() * (2.0 / (1.0 + z2))) * &ud;
    let u = z * (-2.0 * a.d / (1.0 + z2));
    let w = a.dmat() * a.u.transpose() * z * (2.0 / (1.0 + z2));
    let alpha = a.d * (1.0 - z2) / (1.0 + z2);
    CBFactors {
        c: CParam { s, y },
        b: BParam { lam, u, w, alpha },
        m: f64::NAN,
    }
}

/// c̃_L(b) and a_R(b) for b ∈ B′.
pub fn ca_project(b: &BParam) -> Result<CAFactors> {
    if b.alpha.abs() < B_PRIME_GUARD {
        return Err(Error::Domain("b is not in B' (alpha = 0)".into()));
    }
    let sg = b.sgn_alpha();
    let aa = b.alpha.abs();
    let c = CParam {
        s: aa,
        y: &b.u * (-sg),
    };
    let n = b.n();
    let mut dm = DMatrix::identity(n, n);
    dm[(n - 1, n - 1)] = sg;
    let a = AParam {
        z: &b.u * (-sg / (1.0 + aa)),
        u: (&b.lam - &b.u * b.w.transpose() * (sg / (1.0 + aa))) * dm,
        d: sg,
    };
    Ok(CAFactors { c, a })
}

/// b_R(b·c): the B-part of the CB factorization of b·c.
pub fn b_r(b: &BParam, c: &CParam) -> Result<BParam> {
    Ok(swap_bc_to_cb(b, c)?.b)
}

/// One solution (s, y), (s̃, ỹ) of b₁(s, y) = (s̃, ỹ)b₂ with the gauge s = 1.
pub fn recover_pair(b1: &BParam, b2: &BParam, tol: f64) -> Result<(CParam, CParam)> {
    let (a, at) = (b1.alpha, b2.alpha);
    if (a - 1.0).abs() < 1e-12 || (at - 1.0).abs() < 1e-12 {
        return Err(Error::Domain("alpha = 1 admits no unique pair".into()));
    }
    let r = block_invariant_residual(b1, b2);
    if r > tol {
        return Err(Error::Invariant {
            what: "pair relation between b1 and b2".into(),
            residual: r,
        });
    }
    let s = 1.0;
    let st = (a - 1.0) / (at - 1.0) / s;
    let yt = &b1.u / (s * (1.0 - at)) - &b2.u / (1.0 - at);
    let y = &b2.w / (at - 1.0) - &b1.w * (s / (a - 1.0));
    Ok((CParam { s, y }, CParam { s: st, y: yt }))
}

/// ‖(Λ − uwᵗ/(α−1)) − (Λ̃ − ũw̃ᵗ/(α̃−1))‖∞.
pub fn block_invariant_residual(b1: &BParam, b2: &BParam) -> f64 {
    let l1 = &b1.lam - &b1.u * b1.w.transpose() / (b1.alpha - 1.0);
    let l2 = &b2.lam - &b2.u * b2.w.transpose() / (b2.alpha - 1.0);
    (l1 - l2).amax()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::groups::{sample_a, sample_b, sample_c};
    use nalgebra::dvector;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn b_example() -> BParam {
        BParam {
            lam: DMatrix::zeros(1, 1),
            u: dvector![1.0],
            w: dvector![-1.0],
            alpha: 0.0,
        }
    }

    #[test]
    fn swap_example_n1() {
        let c = CParam::new(2.0, dvector![0.0]).unwrap();
        let r = swap_bc_to_cb(&b_example(), &c).unwrap();
        assert!((r.m - 0.625).abs() < 1e-15);
        assert!((r.c.s - 1.25).abs() < 1e-15);
        assert!((r.c.y[0] + 0.75).abs() < 1e-15);
        assert!((r.b.lam[(0, 0)] - 0.6).abs() < 1e-15);
        assert!((r.b.u[0] - 0.8).abs() < 1e-15);
        assert!((r.b.w[0] + 0.8).abs() < 1e-15);
        assert!((r.b.alpha - 0.6).abs() < 1e-15);
        assert!((r.c.s * (r.b.alpha - 1.0) + 0.5).abs() < 1e-15);
    }

    #[test]
    fn swap_trivial_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let b = sample_b(&mut rng, 2);
        let r = swap_bc_to_cb(&b, &CParam::identity(2)).unwrap();
        assert!(r.c.dist(&CParam::identity(2)) < 1e-14 && r.b.dist(&b) < 1e-14);
        let mut rot = BParam::identity(2);
        rot.lam = crate::groups::random_rotation(&mut rng, 2);
        let c = sample_c(&mut rng, 2);
        let r = swap_bc_to_cb(&rot, &c).unwrap();
        assert!((r.c.s - c.s).abs() < 1e-14);
        assert!((&r.c.y - &rot.lam * &c.y).amax() < 1e-14);
        assert!(r.b.dist(&rot) < 1e-14);
        let back = swap_cb_to_bc(&r.c, &r.b).unwrap();
        assert!((&back.c.y - rot.lam.transpose() * &r.c.y).amax() < 1e-14);
    }

    #[test]
    fn both_m_forms_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for n in 1..4 {
            for _ in 0..200 {
                let b = sample_b(&mut rng, n);
                let c = sample_c(&mut rng, n);
                let m1 = swap_m(&b, &c);
                let m2 = swap_m_quadratic(&b, &c);
                assert!((m1 - m2).abs() <= 1e-10 * m1.max(1.0), "{m1} {m2}");
                let mt1 = swap_mtilde(&c, &b);
                let mt2 = swap_mtilde_quadratic(&c, &b);
                assert!((mt1 - mt2).abs() <= 1e-10 * mt1.max(1.0));
            }
        }
    }

    #[test]
    fn printed_product_forms_agree_with_regular_forms() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for n in 1..4 {
            for _ in 0..100 {
                let b = sample_b(&mut rng, n);
                let c = sample_c(&mut rng, n);
                let r = swap_bc_to_cb(&b, &c).unwrap();
                let k = (1.0 - b.alpha) / c.s;
                let v = &b.w - &c.y * k;
                let left = &b.lam - &b.u * b.w.transpose() / (b.alpha - 1.0);
                let right = DMatrix::identity(n, n)
                    - &v * v.transpose() / (r.m * (1.0 - b.alpha));
                assert!((left * right - &r.b.lam).amax() < 1e-8);
                let back = swap_cb_to_bc(&r.c, &r.b).unwrap();
                let at = r.b.alpha;
                let q = &r.b.u + &r.c.y * (1.0 - at);
                let mt = swap_mtilde(&r.c, &r.b);
                let p = (DMatrix::identity(n, n) - &q * q.transpose() / (mt * (1.0 - at)))
                    * (&r.b.lam + &r.b.u * r.b.w.transpose() / (1.0 - at));
                assert!((p - &back.b.lam).amax() < 1e-8);
            }
        }
    }

    #[test]
    fn a_factor_examples() {
        let a = AParam::identity(2);
        let r = a_factor(&a);
        assert!(r.c.dist(&CParam::identity(2)) < 1e-15);
        assert!(r.b.dist(&BParam::identity(2)) < 1e-15);
        let a = AParam {
            z: dvector![-0.5],
            u: DMatrix::identity(1, 1),
            d: 1.0,
        };
        let r = a_factor(&a);
        assert!((r.c.s - 5.0 / 3.0).abs() < 1e-15);
        assert!((r.c.y[0] - 4.0 / 3.0).abs() < 1e-15);
        assert!((r.b.lam[(0, 0)] - 0.6).abs() < 1e-15);
        assert!((r.b.u[0] - 0.8).abs() < 1e-15);
        assert!((r.b.w[0] + 0.8).abs() < 1e-15);
        assert!((r.b.alpha - 0.6).abs() < 1e-15);
        assert!((embed_a(&a).m - r.matrix().m).amax() < 1e-14);
    }

    #[test]
    fn ca_project_examples() {
        let b = BParam {
            lam: DMatrix::from_element(1, 1, 0.6),
            u: dvector![0.8],
            w: dvector![-0.8],
            alpha: 0.6,
        };
        let r = ca_project(&b).unwrap();
        assert!((r.c.s - 0.6).abs() < 1e-15 && (r.c.y[0] + 0.8).abs() < 1e-15);
        assert!((r.a.z[0] + 0.5).abs() < 1e-15);
        assert!((r.a.u[(0, 0)] - 1.0).abs() < 1e-15 && r.a.d == 1.0);
        assert!((r.matrix().m - embed_b(&b).m).amax() < 1e-14);
        assert!(ca_project(&b_example()).is_err());
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut rot = BParam::identity(3);
        rot.lam = crate::groups::random_rotation(&mut rng, 3);
        let r = ca_project(&rot).unwrap();
        assert!(r.c.dist(&CParam::identity(3)) < 1e-15 && (&r.a.u - &rot.lam).amax() < 1e-15);
        loop {
            let b = sample_b(&mut rng, 3);
            if b.alpha < 0.0 {
                assert_eq!(ca_project(&b).unwrap().a.d, -1.0);
                break;
            }
        }
    }

    #[test]
    fn factor_ca_matches_ca_project() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for n in 1..4 {
            for _ in 0..100 {
                let b = sample_b(&mut rng, n);
                let p = ca_project(&b).unwrap();
                let q = factor_ca(&embed_b(&b)).unwrap();
                assert!(p.c.dist(&q.c) < 1e-9);
                assert!((&p.a.z - &q.a.z).amax() < 1e-9 && (&p.a.u - &q.a.u).amax() < 1e-9);
            }
        }
    }

    #[test]
    fn a_r_inverts_b_r_on_a() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for n in 1..4 {
            for _ in 0..100 {
                let a = sample_a(&mut rng, n);
                let back = ca_project(&a_factor(&a).b).unwrap().a;
                assert!((&back.z - &a.z).amax() < 1e-10);
                assert!((&back.u - &a.u).amax() < 1e-10);
                assert_eq!(back.d, a.d);
            }
        }
    }

    #[test]
    fn recover_pair_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for n in 1..4 {
            for _ in 0..50 {
                let b1 = sample_b(&mut rng, n);
                let c = sample_c(&mut rng, n);
                let b2 = swap_bc_to_cb(&b1, &c).unwrap().b;
                let (p, pt) = recover_pair(&b1, &b2, 1e-8).unwrap();
                let lhs = embed_b(&b1).mul(&embed_c(&p));
                let rhs = embed_c(&pt).mul(&embed_b(&b2));
                assert!((lhs.m - rhs.m).amax() < 1e-8);
            }
            let b = sample_b(&mut rng, n);
            let (p, pt) = recover_pair(&b, &b, 1e-8).unwrap();
            assert!((pt.s - 1.0).abs() < 1e-14);
            let lhs = embed_b(&b).mul(&embed_c(&p));
            let rhs = embed_c(&pt).mul(&embed_b(&b));
            assert!((lhs.m - rhs.m).amax() < 1e-9);
        }
        assert!(recover_pair(&BParam::identity(2), &BParam::identity(2), 1e-8).is_err());
    }

    #[test]
    fn factor_identity() {
        let g = GroupMatrix::identity(2);
        let bc = factor_bc(&g).unwrap();
        assert!(bc.b.dist(&BParam::identity(2)) < 1e-15 && bc.c.dist(&CParam::identity(2)) < 1e-15);
        let cb = factor_cb(&g).unwrap();
        assert!(cb.b.dist(&BParam::identity(2)) < 1e-15 && cb.c.dist(&CParam::identity(2)) < 1e-15);
    }
}
