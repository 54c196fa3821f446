//! Linear algebra of `so(η)` for the Minkowski form of signature (+,−,…,−).
//!
//! Matrices act on ℝ^{n+2}. The basis `M_{ab}` (a < b) is ordered
//! lexicographically; every coefficient vector in the crate uses that order.

use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};

/// The diagonal form η = diag(1, −1, …, −1) on ℝ^{n+2}.
#[derive(Debug, Clone, PartialEq)]
pub struct MinkForm {
    pub n: usize,
    pub eta: DVector<f64>,
}

impl MinkForm {
    pub fn new(n: usize) -> Self {
        let mut eta = DVector::from_element(n + 2, -1.0);
        eta[0] = 1.0;
        MinkForm { n, eta }
    }

    pub fn dim(&self) -> usize {
        self.n + 2
    }

    pub fn matrix(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&self.eta)
    }
}

pub fn eta(n: usize) -> DMatrix<f64> {
    MinkForm::new(n).matrix()
}

#[inline]
fn eta_at(i: usize) -> f64 {
    if i == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Number of basis elements of `so(η)` for ℝ^{n+2}.
pub fn algebra_dim(n: usize) -> usize {
    let d = n + 2;
    d * (d - 1) / 2
}

/// Position of `M_{ab}` in the lexicographic basis.
pub fn basis_index(n: usize, a: usize, b: usize) -> usize {
    let d = n + 2;
    debug_assert!(a < b && b < d);
    a * (2 * d - a - 1) / 2 + (b - a - 1)
}

/// Inverse of [`basis_index`].
pub fn basis_pair(n: usize, idx: usize) -> (usize, usize) {
    let d = n + 2;
    let mut k = idx;
    for a in 0..d {
        let row = d - a - 1;
        if k < row {
            return (a, a + 1 + k);
        }
        k -= row;
    }
    panic!("basis index {idx} out of range for n = {n}");
}

/// An element of `so(η)` carried in both coefficient and matrix form.
#[derive(Debug, Clone, PartialEq)]
pub struct LieElement {
    pub n: usize,
    pub coeffs: DVector<f64>,
    pub matrix: DMatrix<f64>,
}

fn basis_matrix(n: usize, a: usize, b: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(n + 2, n + 2);
    m[(a, b)] += eta_at(b);
    m[(b, a)] -= eta_at(a);
    m
}

impl LieElement {
    pub fn zero(n: usize) -> Self {
        LieElement {
            n,
            coeffs: DVector::zeros(algebra_dim(n)),
            matrix: DMatrix::zeros(n + 2, n + 2),
        }
    }

    pub fn from_coeffs(n: usize, coeffs: DVector<f64>) -> Result<Self> {
        if coeffs.len() != algebra_dim(n) {
            return Err(Error::Dimension {
                expected: algebra_dim(n),
                got: coeffs.len(),
            });
        }
        let mut matrix = DMatrix::zeros(n + 2, n + 2);
        for (i, &x) in coeffs.iter().enumerate() {
            if x != 0.0 {
                let (a, b) = basis_pair(n, i);
                matrix[(a, b)] += x * eta_at(b);
                matrix[(b, a)] -= x * eta_at(a);
            }
        }
        Ok(LieElement { n, coeffs, matrix })
    }

    /// Reads coefficients off the strict upper triangle; the matrix is kept as given.
    pub fn from_matrix(matrix: DMatrix<f64>) -> Result<Self> {
        let d = matrix.nrows();
        if d < 3 || matrix.ncols() != d {
            return Err(Error::Dimension {
                expected: 3.max(d),
                got: matrix.ncols(),
            });
        }
        let n = d - 2;
        let mut coeffs = DVector::zeros(algebra_dim(n));
        for a in 0..d {
            for b in (a + 1)..d {
                coeffs[basis_index(n, a, b)] = matrix[(a, b)] * eta_at(b);
            }
        }
        Ok(LieElement { n, coeffs, matrix })
    }

    /// ‖Xᵗη + ηX‖∞.
    pub fn antisymmetry_residual(&self) -> f64 {
        let e = eta(self.n);
        let r = self.matrix.transpose() * &e + &e * &self.matrix;
        r.amax()
    }

    pub fn scale(&self, k: f64) -> Self {
        LieElement {
            n: self.n,
            coeffs: &self.coeffs * k,
            matrix: &self.matrix * k,
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        same_n(self.n, other.n)?;
        Ok(LieElement {
            n: self.n,
            coeffs: &self.coeffs + &other.coeffs,
            matrix: &self.matrix + &other.matrix,
        })
    }
}

fn same_n(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::Dimension {
            expected: a + 2,
            got: b + 2,
        });
    }
    Ok(())
}

/// The basis element `M_{ab} = e_a⊗η(e_b) − e_b⊗η(e_a)`.
pub fn gen_basis(n: usize, a: usize, b: usize) -> Result<LieElement> {
    if a >= b || b > n + 1 {
        return Err(Error::Index(format!(
            "M_({a},{b}) needs 0 <= a < b <= {}",
            n + 1
        )));
    }
    let mut coeffs = DVector::zeros(algebra_dim(n));
    coeffs[basis_index(n, a, b)] = 1.0;
    Ok(LieElement {
        n,
        coeffs,
        matrix: basis_matrix(n, a, b),
    })
}

pub fn bracket(x: &LieElement, y: &LieElement) -> Result<LieElement> {
    same_n(x.n, y.n)?;
    let m = &x.matrix * &y.matrix - &y.matrix * &x.matrix;
    LieElement::from_matrix(m)
}

/// The invariant form k(X, Y) = ½ tr(XY).
pub fn form_k(x: &LieElement, y: &LieElement) -> Result<f64> {
    same_n(x.n, y.n)?;
    Ok(0.5 * (&x.matrix * &y.matrix).trace())
}

/// The induced form on `so(η)*`, with dual vectors given by their values on `M_{ab}`.
pub fn form_ktilde(n: usize, phi: &DVector<f64>, psi: &DVector<f64>) -> Result<f64> {
    let dim = algebra_dim(n);
    for v in [phi, psi] {
        if v.len() != dim {
            return Err(Error::Dimension {
                expected: dim,
                got: v.len(),
            });
        }
    }
    let mut acc = 0.0;
    for i in 0..dim {
        let (a, b) = basis_pair(n, i);
        acc += -eta_at(a) * eta_at(b) * phi[i] * psi[i];
    }
    Ok(acc)
}

/// An element of SO(η) stored densely.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupMatrix {
    pub n: usize,
    pub m: DMatrix<f64>,
}

impl GroupMatrix {
    pub fn identity(n: usize) -> Self {
        GroupMatrix {
            n,
            m: DMatrix::identity(n + 2, n + 2),
        }
    }

    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        let d = m.nrows();
        if d < 3 || m.ncols() != d {
            return Err(Error::Dimension {
                expected: 3.max(d),
                got: m.ncols(),
            });
        }
        Ok(GroupMatrix { n: d - 2, m })
    }

    /// Like [`GroupMatrix::new`] but also requires gᵗηg = η, det g = 1 and g₀₀ ≥ 1.
    pub fn checked(m: DMatrix<f64>, tol: f64) -> Result<Self> {
        let g = GroupMatrix::new(m)?;
        let r = g.eta_residual();
        if r > tol {
            return Err(Error::Invariant {
                what: "g^T eta g = eta".into(),
                residual: r,
            });
        }
        let det = g.m.clone().determinant();
        if (det - 1.0).abs() > 1e-6 {
            return Err(Error::Invariant {
                what: "det g = 1".into(),
                residual: (det - 1.0).abs(),
            });
        }
        if g.m[(0, 0)] < 1.0 - tol {
            return Err(Error::Invariant {
                what: "g_00 >= 1".into(),
                residual: 1.0 - g.m[(0, 0)],
            });
        }
        Ok(g)
    }

    pub fn eta_residual(&self) -> f64 {
        let e = eta(self.n);
        (self.m.transpose() * &e * &self.m - e).amax()
    }

    pub fn mul(&self, other: &GroupMatrix) -> GroupMatrix {
        GroupMatrix {
            n: self.n,
            m: &self.m * &other.m,
        }
    }

    /// g⁻¹ = η gᵗ η.
    pub fn inverse(&self) -> GroupMatrix {
        let mut m = self.m.transpose();
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                m[(i, j)] *= eta_at(i) * eta_at(j);
            }
        }
        GroupMatrix { n: self.n, m }
    }

    /// Ad(g)X = gXg⁻¹.
    pub fn adjoint(&self, x: &LieElement) -> LieElement {
        let m = &self.m * &x.matrix * self.inverse().m;
        LieElement::from_matrix(m).expect("square matrix")
    }

    /// One polar-type Newton step g ← ½(g + η(gᵗ)⁻¹η) when the drift exceeds 1e−8.
    pub fn repair(&self) -> GroupMatrix {
        if self.eta_residual() <= 1e-8 {
            return self.clone();
        }
        let e = eta(self.n);
        let inv_t = self
            .m
            .transpose()
            .try_inverse()
            .unwrap_or_else(|| self.m.clone());
        GroupMatrix {
            n: self.n,
            m: (&self.m + &e * inv_t * &e) * 0.5,
        }
    }
}

fn taylor_exp(a: &DMatrix<f64>) -> DMatrix<f64> {
    let d = a.nrows();
    let mut sum = DMatrix::identity(d, d);
    let mut term = DMatrix::identity(d, d);
    for k in 1..=20 {
        term = &term * a / k as f64;
        sum += &term;
        if term.amax() < 1e-18 {
            break;
        }
    }
    sum
}

/// Matrix exponential by scaling and squaring.
pub fn expm(a: &DMatrix<f64>) -> DMatrix<f64> {
    let norm = a.abs().row_sum().max();
    let mut s = 0;
    if norm > 0.25 {
        s = (norm / 0.25).log2().ceil() as i32;
    }
    let scaled = a / 2f64.powi(s);
    let mut r = taylor_exp(&scaled);
    for _ in 0..s {
        r = &r * &r;
    }
    r
}

fn sqrtm_db(a: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let d = a.nrows();
    let mut y = a.clone();
    let mut z = DMatrix::identity(d, d);
    for _ in 0..60 {
        let yi = y.clone().try_inverse()?;
        let zi = z.clone().try_inverse()?;
        let yn = (&y + zi) * 0.5;
        let zn = (&z + yi) * 0.5;
        let delta = (&yn - &y).amax();
        y = yn;
        z = zn;
        if delta < 1e-15 * y.amax().max(1.0) {
            break;
        }
    }
    Some(y)
}

/// Principal matrix logarithm by inverse scaling and squaring.
pub fn logm(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let d = a.nrows();
    let id = DMatrix::<f64>::identity(d, d);
    let mut x = a.clone();
    let mut k = 0;
    while (&x - &id).abs().row_sum().max() > 0.2 {
        x = sqrtm_db(&x).ok_or(Error::LogBranch)?;
        k += 1;
        if k > 60 || !x.iter().all(|v| v.is_finite()) {
            return Err(Error::LogBranch);
        }
    }
    // log(I + E) via the series in E/(2I + E).
    let e = &x - &id;
    let denom = (&id * 2.0 + &e).try_inverse().ok_or(Error::LogBranch)?;
    let q = &e * denom;
    let q2 = &q * &q;
    let mut term = q.clone();
    let mut sum = q.clone();
    for j in 1..40 {
        term = &term * &q2;
        let add = &term / (2 * j + 1) as f64;
        sum += &add;
        if add.amax() < 1e-18 {
            break;
        }
    }
    let out = sum * 2.0 * 2f64.powi(k);
    if !out.iter().all(|v| v.is_finite()) {
        return Err(Error::LogBranch);
    }
    Ok(out)
}

pub fn mat_exp(x: &LieElement) -> GroupMatrix {
    GroupMatrix {
        n: x.n,
        m: expm(&x.matrix),
    }
}

pub fn mat_log(g: &GroupMatrix) -> Result<LieElement> {
    // Real eigenvalues on the negative axis have no real principal logarithm.
    let eig = g.m.clone().complex_eigenvalues();
    if eig
        .iter()
        .any(|l| l.re < 0.0 && l.im.abs() < 1e-9 * l.re.abs().max(1.0))
    {
        return Err(Error::LogBranch);
    }
    let l = logm(&g.m)?;
    LieElement::from_matrix(l)
}

/// ċ₀ = M_{0,n+1}.
pub fn c_dot0(n: usize) -> LieElement {
    gen_basis(n, 0, n + 1).expect("valid indices")
}

/// ċ_k = M_{k,n+1} − M_{k,0} for 1 ≤ k ≤ n; the minus sign uses M_{k0} = −M_{0k}.
pub fn c_dot_k(n: usize, k: usize) -> LieElement {
    let a = gen_basis(n, k, n + 1).expect("valid indices");
    let b = gen_basis(n, 0, k).expect("valid indices");
    a.add(&b).expect("same n")
}

/// The basis (ċ₀, ċ₁, …, ċ_n) of 𝔠.
pub fn c_basis(n: usize) -> Vec<LieElement> {
    let mut v = vec![c_dot0(n)];
    for k in 1..=n {
        v.push(c_dot_k(n, k));
    }
    v
}

/// Basis of 𝔟 = span{M_{kl} : 1 ≤ k < l ≤ n+1}.
pub fn b_basis(n: usize) -> Vec<LieElement> {
    let mut v = Vec::new();
    for k in 1..=n + 1 {
        for l in (k + 1)..=n + 1 {
            v.push(gen_basis(n, k, l).expect("valid indices"));
        }
    }
    v
}

/// Basis of 𝔞 = span{M_{ab} : 0 ≤ a < b ≤ n}, the Lorentz algebra fixing e_{n+1}.
pub fn a_basis(n: usize) -> Vec<LieElement> {
    let mut v = Vec::new();
    for a in 0..=n {
        for b in (a + 1)..=n {
            v.push(gen_basis(n, a, b).expect("valid indices"));
        }
    }
    v
}

/// M(y) = Σ y_k ċ_k.
pub fn m_of_y(n: usize, y: &DVector<f64>) -> LieElement {
    let mut out = LieElement::zero(n);
    for k in 1..=n {
        if y[k - 1] != 0.0 {
            out = out.add(&c_dot_k(n, k).scale(y[k - 1])).expect("same n");
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;

    #[test]
    fn basis_index_round_trip() {
        for n in 1..5 {
            for i in 0..algebra_dim(n) {
                let (a, b) = basis_pair(n, i);
                assert_eq!(basis_index(n, a, b), i);
            }
        }
    }

    #[test]
    fn m01_and_m12_for_n1() {
        let m01 = gen_basis(1, 0, 1).unwrap();
        assert_eq!(m01.matrix, dmatrix![0.0, -1.0, 0.0; -1.0, 0.0, 0.0; 0.0, 0.0, 0.0]);
        let m12 = gen_basis(1, 1, 2).unwrap();
        assert_eq!(m12.matrix, dmatrix![0.0, 0.0, 0.0; 0.0, 0.0, -1.0; 0.0, 1.0, 0.0]);
        assert!(gen_basis(1, 1, 1).is_err());
        assert!(gen_basis(1, 0, 3).is_err());
    }

    #[test]
    fn c_dot0_acts_on_c_dot_k() {
        for n in 1..4 {
            for k in 1..=n {
                let br = bracket(&c_dot0(n), &c_dot_k(n, k)).unwrap();
                assert!((&br.matrix - &c_dot_k(n, k).matrix).amax() < 1e-15);
                for l in 1..=n {
                    let z = bracket(&c_dot_k(n, k), &c_dot_k(n, l)).unwrap();
                    assert!(z.matrix.amax() < 1e-15);
                }
            }
        }
    }

    #[test]
    fn m01_m12_bracket_is_minus_m02() {
        let br = bracket(&gen_basis(1, 0, 1).unwrap(), &gen_basis(1, 1, 2).unwrap()).unwrap();
        let m02 = gen_basis(1, 0, 2).unwrap();
        assert!((&br.matrix + &m02.matrix).amax() < 1e-15);
    }

    #[test]
    fn form_k_signs() {
        for n in 1..4 {
            let b = gen_basis(n, 0, n + 1).unwrap();
            assert_eq!(form_k(&b, &b).unwrap(), 1.0);
            for k in 1..=n {
                let e = gen_basis(n, k, n + 1).unwrap();
                assert_eq!(form_k(&e, &e).unwrap(), -1.0);
            }
        }
    }

    #[test]
    fn exp_of_boost_is_hyperbolic() {
        let t = 0.7;
        let g = mat_exp(&c_dot0(1).scale(t));
        assert!((g.m[(0, 0)] - t.cosh()).abs() < 1e-14);
        assert!((g.m[(2, 2)] - t.cosh()).abs() < 1e-14);
        assert!((g.m[(0, 2)].abs() - t.sinh()).abs() < 1e-14);
        assert!((g.m[(1, 1)] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn log_rejects_negative_real_eigenvalues() {
        let g = GroupMatrix::new(DMatrix::from_diagonal(&DVector::from_vec(vec![
            1.0, -1.0, -1.0,
        ])))
        .unwrap();
        assert!(mat_log(&g).is_err());
    }

    #[test]
    fn exp_zero_is_identity() {
        let g = mat_exp(&LieElement::zero(2));
        assert_eq!(g.m, DMatrix::identity(4, 4));
    }
}
