//! The subgroups A (extended Lorentz), B = SO(n+1) and C ≅ ℝ₊ ⋉ ℝⁿ in chart form.

use crate::error::{Error, Result};
use crate::minkalg::{c_dot0, m_of_y, GroupMatrix, LieElement};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// a = (z, U, d) with |z| < 1, U ∈ SO(n), d = ±1.
#[derive(Debug, Clone, PartialEq)]
pub struct AParam {
    pub z: DVector<f64>,
    pub u: DMatrix<f64>,
    pub d: f64,
}

/// b = (Λ, u, w, α), the block layout [[Λ, u], [wᵗ, α]] of an element of SO(n+1).
#[derive(Debug, Clone, PartialEq)]
pub struct BParam {
    pub lam: DMatrix<f64>,
    pub u: DVector<f64>,
    pub w: DVector<f64>,
    pub alpha: f64,
}

/// c = (s, y) with group law (s₁, y₁)(s₂, y₂) = (s₁s₂, s₂y₁ + y₂).
#[derive(Debug, Clone, PartialEq)]
pub struct CParam {
    pub s: f64,
    pub y: DVector<f64>,
}

/// (ṡ, ẏ) standing for −ṡ·ċ₀ + Σ ẏ_k ċ_k.
#[derive(Debug, Clone, PartialEq)]
pub struct CLieParam {
    pub sdot: f64,
    pub ydot: DVector<f64>,
}

impl AParam {
    pub fn identity(n: usize) -> Self {
        AParam {
            z: DVector::zeros(n),
            u: DMatrix::identity(n, n),
            d: 1.0,
        }
    }

    pub fn n(&self) -> usize {
        self.z.len()
    }

    /// D = diag(I_{n−1}, d).
    pub fn dmat(&self) -> DMatrix<f64> {
        let n = self.n();
        let mut d = DMatrix::identity(n, n);
        d[(n - 1, n - 1)] = self.d;
        d
    }

    pub fn validate(&self, tol: f64) -> Result<()> {
        let n = self.n();
        if self.z.norm() >= 1.0 {
            return Err(Error::Domain(format!("|z| = {} >= 1", self.z.norm())));
        }
        let r = (self.u.transpose() * &self.u - DMatrix::identity(n, n)).amax();
        if r > tol {
            return Err(Error::Invariant {
                what: "U^T U = I".into(),
                residual: r,
            });
        }
        let det = self.u.clone().determinant();
        if (det - 1.0).abs() > tol.max(1e-8) {
            return Err(Error::Invariant {
                what: "det U = 1".into(),
                residual: (det - 1.0).abs(),
            });
        }
        if self.d.abs() != 1.0 {
            return Err(Error::Domain(format!("d = {} is not a sign", self.d)));
        }
        Ok(())
    }
}

impl BParam {
    pub fn identity(n: usize) -> Self {
        BParam {
            lam: DMatrix::identity(n, n),
            u: DVector::zeros(n),
            w: DVector::zeros(n),
            alpha: 1.0,
        }
    }

    pub fn n(&self) -> usize {
        self.u.len()
    }

    /// The (n+1)×(n+1) block [[Λ, u], [wᵗ, α]].
    pub fn block(&self) -> DMatrix<f64> {
        let n = self.n();
        let mut m = DMatrix::zeros(n + 1, n + 1);
        m.view_mut((0, 0), (n, n)).copy_from(&self.lam);
        for k in 0..n {
            m[(k, n)] = self.u[k];
            m[(n, k)] = self.w[k];
        }
        m[(n, n)] = self.alpha;
        m
    }

    pub fn from_block(m: &DMatrix<f64>) -> Self {
        let n = m.nrows() - 1;
        BParam {
            lam: m.view((0, 0), (n, n)).into_owned(),
            u: DVector::from_fn(n, |k, _| m[(k, n)]),
            w: DVector::from_fn(n, |k, _| m[(n, k)]),
            alpha: m[(n, n)],
        }
    }

    pub fn mul(&self, other: &BParam) -> BParam {
        BParam::from_block(&(self.block() * other.block()))
    }

    pub fn inverse(&self) -> BParam {
        BParam::from_block(&self.block().transpose())
    }

    /// Largest residual among the constraints of the orthogonality relations.
    pub fn constraint_residual(&self) -> f64 {
        let n = self.n();
        let id = DMatrix::<f64>::identity(n, n);
        let r1 = (&self.lam * self.lam.transpose() + &self.u * self.u.transpose() - &id).amax();
        let r2 = (&self.lam * &self.w + &self.u * self.alpha).amax();
        let r3 = (self.lam.transpose() * &self.lam + &self.w * self.w.transpose() - &id).amax();
        let r4 = (self.lam.transpose() * &self.u + &self.w * self.alpha).amax();
        let r5 = (self.u.norm_squared() + self.alpha * self.alpha - 1.0).abs();
        let r6 = (self.w.norm_squared() + self.alpha * self.alpha - 1.0).abs();
        let r7 = (self.lam.clone().determinant() - self.alpha).abs();
        [r1, r2, r3, r4, r5, r6, r7].into_iter().fold(0.0, f64::max)
    }

    pub fn validate(&self, tol: f64) -> Result<()> {
        let r = self.constraint_residual();
        if r > tol {
            return Err(Error::Invariant {
                what: "orthogonality relations of (Lambda, u, w, alpha)".into(),
                residual: r,
            });
        }
        Ok(())
    }

    /// Max-abs distance between two parameter sets.
    pub fn dist(&self, other: &BParam) -> f64 {
        (self.block() - other.block()).amax()
    }

    pub fn sgn_alpha(&self) -> f64 {
        if self.alpha < 0.0 {
            -1.0
        } else {
            1.0
        }
    }
}

impl CParam {
    pub fn identity(n: usize) -> Self {
        CParam {
            s: 1.0,
            y: DVector::zeros(n),
        }
    }

    pub fn new(s: f64, y: DVector<f64>) -> Result<Self> {
        if !(s > 0.0) {
            return Err(Error::Domain(format!("s = {s} must be positive")));
        }
        Ok(CParam { s, y })
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    /// Distance in the chart (log s, y).
    pub fn dist(&self, other: &CParam) -> f64 {
        let ds = (self.s.ln() - other.s.ln()).abs();
        ds.max((&self.y - &other.y).amax())
    }
}

impl CLieParam {
    /// The element −ṡ·ċ₀ + M(ẏ) of 𝔠.
    pub fn to_lie(&self) -> LieElement {
        let n = self.ydot.len();
        c_dot0(n)
            .scale(-self.sdot)
            .add(&m_of_y(n, &self.ydot))
            .expect("same n")
    }

    /// Coefficients in the basis (ċ₀, ċ₁, …, ċ_n).
    pub fn basis_coeffs(&self) -> DVector<f64> {
        let n = self.ydot.len();
        let mut v = DVector::zeros(n + 1);
        v[0] = -self.sdot;
        v.rows_mut(1, n).copy_from(&self.ydot);
        v
    }

    pub fn from_basis_coeffs(v: &DVector<f64>) -> Self {
        let n = v.len() - 1;
        CLieParam {
            sdot: -v[0],
            ydot: v.rows(1, n).into_owned(),
        }
    }
}

pub fn embed_a(a: &AParam) -> GroupMatrix {
    let n = a.n();
    let z2 = a.z.norm_squared();
    let f = 2.0 / (1.0 - z2);
    let ud = &a.u * a.dmat();
    let mut m = DMatrix::zeros(n + 2, n + 2);
    m[(0, 0)] = (1.0 + z2) / (1.0 - z2);
    let top = a.z.transpose() * &ud * f;
    let mid = (DMatrix::identity(n, n) + &a.z * a.z.transpose() * f) * &ud;
    for k in 0..n {
        m[(0, k + 1)] = top[k];
        m[(k + 1, 0)] = f * a.z[k];
        for l in 0..n {
            m[(k + 1, l + 1)] = mid[(k, l)];
        }
    }
    m[(n + 1, n + 1)] = a.d;
    GroupMatrix { n, m }
}

pub fn recover_a(g: &GroupMatrix) -> Result<AParam> {
    let n = g.n;
    let d = g.m[(n + 1, n + 1)];
    let d = if d < 0.0 { -1.0 } else { 1.0 };
    let g00 = g.m[(0, 0)];
    // g00 = (1+|z|²)/(1−|z|²) and g_k0 = 2z_k/(1−|z|²).
    let z = DVector::from_fn(n, |k, _| g.m[(k + 1, 0)] / (1.0 + g00));
    let z2 = z.norm_squared();
    let f = 2.0 / (1.0 - z2);
    let mid = g.m.view((1, 1), (n, n)).into_owned();
    let lhs = DMatrix::identity(n, n) + &z * z.transpose() * f;
    let ud = lhs
        .try_inverse()
        .ok_or_else(|| Error::Domain("singular boost block".into()))?
        * mid;
    let mut dm = DMatrix::identity(n, n);
    dm[(n - 1, n - 1)] = d;
    let a = AParam { z, u: ud * dm, d };
    a.validate(1e-8)?;
    Ok(a)
}

pub fn embed_b(b: &BParam) -> GroupMatrix {
    let n = b.n();
    let mut m = DMatrix::zeros(n + 2, n + 2);
    m[(0, 0)] = 1.0;
    m.view_mut((1, 1), (n + 1, n + 1)).copy_from(&b.block());
    GroupMatrix { n, m }
}

pub fn recover_b(g: &GroupMatrix) -> Result<BParam> {
    let n = g.n;
    let b = BParam::from_block(&g.m.view((1, 1), (n + 1, n + 1)).into_owned());
    b.validate(1e-8)?;
    Ok(b)
}

pub fn embed_c(c: &CParam) -> GroupMatrix {
    let n = c.n();
    let s = c.s;
    let y2 = c.y.norm_squared();
    let mut m = DMatrix::zeros(n + 2, n + 2);
    let l = n + 1;
    m[(0, 0)] = (s * s + 1.0 + y2) / (2.0 * s);
    m[(0, l)] = (s * s - 1.0 + y2) / (2.0 * s);
    m[(l, 0)] = (s * s - 1.0 - y2) / (2.0 * s);
    m[(l, l)] = (s * s + 1.0 - y2) / (2.0 * s);
    for k in 0..n {
        m[(0, k + 1)] = -c.y[k] / s;
        m[(l, k + 1)] = c.y[k] / s;
        m[(k + 1, 0)] = -c.y[k];
        m[(k + 1, l)] = -c.y[k];
        m[(k + 1, k + 1)] = 1.0;
    }
    GroupMatrix { n, m }
}

pub fn recover_c(g: &GroupMatrix) -> Result<CParam> {
    let n = g.n;
    let s = g.m[(0, 0)] + g.m[(n + 1, 0)];
    let y = DVector::from_fn(n, |k, _| -g.m[(k + 1, 0)]);
    CParam::new(s, y)
}

pub fn c_mul(c1: &CParam, c2: &CParam) -> CParam {
    CParam {
        s: c1.s * c2.s,
        y: &c1.y * c2.s + &c2.y,
    }
}

pub fn c_inv(c: &CParam) -> CParam {
    CParam {
        s: 1.0 / c.s,
        y: -&c.y / c.s,
    }
}

/// (e^x − 1)/x with its series near 0.
pub fn expm1_over_x(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        1.0 + x / 2.0 + x * x / 6.0 + x * x * x / 24.0
    } else {
        x.exp_m1() / x
    }
}

/// log(s)/(s − 1) with its series near s = 1.
pub fn log_over_sm1(s: f64) -> f64 {
    let x = s - 1.0;
    if x.abs() < 1e-4 {
        1.0 - x / 2.0 + x * x / 3.0 - x * x * x / 4.0
    } else {
        s.ln() / x
    }
}

pub fn exp_c(x: &CLieParam) -> CParam {
    CParam {
        s: x.sdot.exp(),
        y: &x.ydot * expm1_over_x(x.sdot),
    }
}

pub fn log_c(c: &CParam) -> CLieParam {
    CLieParam {
        sdot: c.s.ln(),
        ydot: &c.y * log_over_sm1(c.s),
    }
}

/// A sampled element of one of the groups.
#[derive(Debug, Clone, PartialEq)]
pub enum Sample {
    A(AParam),
    B(BParam),
    C(CParam),
    G(GroupMatrix),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    A,
    B,
    C,
    G,
}

pub fn gaussian_vec<R: Rng>(rng: &mut R, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.sample(StandardNormal))
}

/// Haar-distributed element of SO(m) via QR of a Gaussian matrix.
pub fn random_rotation<R: Rng>(rng: &mut R, m: usize) -> DMatrix<f64> {
    let g = DMatrix::from_fn(m, m, |_, _| rng.sample::<f64, _>(StandardNormal));
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..m {
        if r[(j, j)] < 0.0 {
            let mut col = q.column_mut(j);
            col.neg_mut();
        }
    }
    if q.clone().determinant() < 0.0 {
        let mut col = q.column_mut(0);
        col.neg_mut();
    }
    q
}

pub fn sample_a<R: Rng>(rng: &mut R, n: usize) -> AParam {
    let dir = gaussian_vec(rng, n);
    let dir = &dir / dir.norm().max(1e-300);
    let radius = 0.9 * rng.random::<f64>().powf(1.0 / n as f64);
    let d = if rng.random::<bool>() { 1.0 } else { -1.0 };
    AParam {
        z: dir * radius,
        u: random_rotation(rng, n),
        d,
    }
}

pub fn sample_b<R: Rng>(rng: &mut R, n: usize) -> BParam {
    BParam::from_block(&random_rotation(rng, n + 1))
}

pub fn sample_c<R: Rng>(rng: &mut R, n: usize) -> CParam {
    let ls: f64 = rng.random_range(-2.0..2.0);
    CParam {
        s: ls.exp(),
        y: gaussian_vec(rng, n),
    }
}

/// Independent deterministic generator for sample `stream` of a run seeded with `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Deterministic sample of the requested kind for the given seed.
pub fn sample_element(kind: Kind, n: usize, seed: u64) -> Sample {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match kind {
        Kind::A => Sample::A(sample_a(&mut rng, n)),
        Kind::B => Sample::B(sample_b(&mut rng, n)),
        Kind::C => Sample::C(sample_c(&mut rng, n)),
        Kind::G => {
            let b = sample_b(&mut rng, n);
            let c = sample_c(&mut rng, n);
            Sample::G(embed_b(&b).mul(&embed_c(&c)))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::minkalg::{mat_exp, GroupMatrix};
    use nalgebra::dvector;

    #[test]
    fn embed_a_examples() {
        for n in 1..4 {
            assert_eq!(embed_a(&AParam::identity(n)).m, DMatrix::identity(n + 2, n + 2));
            let mut a = AParam::identity(n);
            a.d = -1.0;
            let mut expect = DMatrix::identity(n + 2, n + 2);
            expect[(n, n)] = -1.0;
            expect[(n + 1, n + 1)] = -1.0;
            assert_eq!(embed_a(&a).m, expect);
        }
        let a = AParam {
            z: dvector![0.6],
            u: DMatrix::identity(1, 1),
            d: 1.0,
        };
        let g = embed_a(&a);
        assert!((g.m[(0, 0)] - 2.125).abs() < 1e-14);
        assert!((g.m[(1, 0)] - 1.875).abs() < 1e-14);
        assert_eq!(g.m[(2, 0)], 0.0);
        assert!(g.eta_residual() < 1e-12);
    }

    #[test]
    fn embed_b_example() {
        let b = BParam {
            lam: DMatrix::zeros(1, 1),
            u: dvector![1.0],
            w: dvector![-1.0],
            alpha: 0.0,
        };
        b.validate(1e-12).unwrap();
        let g = embed_b(&b);
        let expect = nalgebra::dmatrix![1.0, 0.0, 0.0; 0.0, 0.0, 1.0; 0.0, -1.0, 0.0];
        assert_eq!(g.m, expect);
    }

    #[test]
    fn embed_c_examples() {
        assert_eq!(embed_c(&CParam::identity(2)).m, DMatrix::identity(4, 4));
        let g = embed_c(&CParam::new(2.0, dvector![0.0]).unwrap());
        assert!((g.m[(0, 0)] - 1.25).abs() < 1e-15);
        assert_eq!(g.m[(1, 0)], 0.0);
        assert!((g.m[(2, 0)] - 0.75).abs() < 1e-15);
        assert!(CParam::new(0.0, dvector![0.0]).is_err());
    }

    #[test]
    fn c_group_law_examples() {
        let c1 = CParam::new(2.0, dvector![1.0, 0.0]).unwrap();
        let c2 = CParam::new(3.0, dvector![0.0, 1.0]).unwrap();
        let p = c_mul(&c1, &c2);
        assert_eq!(p.s, 6.0);
        assert_eq!(p.y, dvector![3.0, 1.0]);
        let inv = c_inv(&c1);
        assert_eq!(inv.s, 0.5);
        assert_eq!(inv.y, dvector![-0.5, 0.0]);
        let e = c_mul(&c1, &inv);
        assert!(e.dist(&CParam::identity(2)) < 1e-15);
    }

    #[test]
    fn exp_log_c_examples() {
        let e = exp_c(&CLieParam {
            sdot: 0.0,
            ydot: dvector![0.0],
        });
        assert_eq!(e, CParam::identity(1));
        let c = CParam::new(std::f64::consts::E, dvector![1.0]).unwrap();
        let l = log_c(&c);
        assert!((l.sdot - 1.0).abs() < 1e-15);
        assert!((l.ydot[0] - 1.0 / (std::f64::consts::E - 1.0)).abs() < 1e-15);
        assert!(exp_c(&l).dist(&c) < 1e-12);
    }

    #[test]
    fn exp_c_matches_matrix_exponential() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in 1..4 {
            for _ in 0..20 {
                let x = CLieParam {
                    sdot: rng.random_range(-1.5..1.5),
                    ydot: gaussian_vec(&mut rng, n),
                };
                let g = mat_exp(&x.to_lie());
                assert!((g.m - embed_c(&exp_c(&x)).m).amax() < 1e-9);
                let c = exp_c(&x);
                let f = mat_exp(&c_dot0(n).scale(-c.s.ln())).mul(&mat_exp(&m_of_y(n, &c.y)));
                assert!((f.m - embed_c(&c).m).amax() < 1e-9);
            }
        }
    }

    #[test]
    fn samples_are_deterministic_and_valid() {
        for n in 1..4 {
            for kind in [Kind::A, Kind::B, Kind::C, Kind::G] {
                assert_eq!(sample_element(kind, n, 11), sample_element(kind, n, 11));
            }
            match sample_element(Kind::A, n, 5) {
                Sample::A(a) => a.validate(1e-10).unwrap(),
                _ => unreachable!(),
            }
            match sample_element(Kind::B, n, 5) {
                Sample::B(b) => b.validate(1e-10).unwrap(),
                _ => unreachable!(),
            }
            match sample_element(Kind::G, n, 5) {
                Sample::G(g) => {
                    GroupMatrix::checked(g.m, 1e-10).unwrap();
                }
                _ => unreachable!(),
            }
        }
    }

    #[test]
    fn small_alpha_fraction_is_small() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let count = (0..10_000)
            .filter(|_| sample_b(&mut rng, 2).alpha.abs() < 0.01)
            .count();
        assert!(count < 300, "{count}");
    }

    #[test]
    fn a_normalizes_lorentz_block() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for n in 1..4 {
            let a = embed_a(&sample_a(&mut rng, n));
            let l = embed_a(&AParam {
                z: sample_a(&mut rng, n).z,
                u: random_rotation(&mut rng, n),
                d: 1.0,
            });
            let conj = a.mul(&l).mul(&a.inverse());
            for k in 0..=n {
                assert!(conj.m[(k, n + 1)].abs() < 1e-12);
                assert!(conj.m[(n + 1, k)].abs() < 1e-12);
            }
        }
    }

    #[test]
    fn recover_round_trips() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for n in 1..4 {
            let a = sample_a(&mut rng, n);
            let r = recover_a(&embed_a(&a)).unwrap();
            assert!((&r.z - &a.z).amax() < 1e-10 && (&r.u - &a.u).amax() < 1e-10 && r.d == a.d);
            let b = sample_b(&mut rng, n);
            assert!(recover_b(&embed_b(&b)).unwrap().dist(&b) < 1e-14);
            let c = sample_c(&mut rng, n);
            assert!(recover_c(&embed_c(&c)).unwrap().dist(&c) < 1e-12);
        }
    }
}
