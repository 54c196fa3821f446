//! Discretized convolution algebra of G_B for n = 1.
//!
//! Grid functions live on one of two charts: the BC chart (θ, log s, y) of G_B = B × C with
//! B = SO(2), and the Γ₀ chart (log t, x₁, x₂) of the open transitive part. Pointwise
//! quadrature versions of convolution and δ̂₀ work for any n.

use crate::decomp::{b_r, factor_bc, swap_bc_to_cb};
use crate::error::{Error, Result};
use crate::groupoid::{bisection_apply, GroupoidPoint};
use crate::groups::{c_inv, c_mul, embed_b, embed_c, gaussian_vec, sample_c, stream_rng, BParam, CParam};
use crate::infgen::{ad_c, c_element, c_exp, j_c_of, tr_ad_c};
use crate::minkalg::{mat_exp, GroupMatrix};
use crate::report::Residual;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::f64::consts::PI;
use std::io::Write;

/// Haar measures on C = {(s, y)} with respect to ds dyⁿ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HaarC {
    pub n: usize,
}

impl HaarC {
    pub fn new(n: usize) -> Self {
        HaarC { n }
    }

    /// d_l c = ds dy / s.
    pub fn left_density(&self, c: &CParam) -> f64 {
        1.0 / c.s
    }

    /// d_r c = ds dy / s^{n+1}.
    pub fn right_density(&self, c: &CParam) -> f64 {
        c.s.powi(-(self.n as i32 + 1))
    }

    /// d_l c / d_r c = sⁿ = j_C(c)⁻¹.
    pub fn modular(&self, c: &CParam) -> f64 {
        c.s.powi(self.n as i32)
    }
}

fn c_coords_vec(c: &CParam) -> DVector<f64> {
    let n = c.n();
    DVector::from_fn(n + 1, |i, _| if i == 0 { c.s } else { c.y[i - 1] })
}

fn c_from_vec(v: &DVector<f64>) -> CParam {
    CParam {
        s: v[0],
        y: v.rows(1, v.len() - 1).into_owned(),
    }
}

/// |det| of the differential of `map` in the (s, y) coordinates, by central differences.
fn jacobian_det<F: Fn(&CParam) -> CParam>(c: &CParam, map: F) -> f64 {
    let x = c_coords_vec(c);
    let d = x.len();
    let mut jac = DMatrix::zeros(d, d);
    for k in 0..d {
        let h = 1e-6 * x[k].abs().max(1.0);
        let mut xp = x.clone();
        let mut xm = x.clone();
        xp[k] += h;
        xm[k] -= h;
        let col = (c_coords_vec(&map(&c_from_vec(&xp))) - c_coords_vec(&map(&c_from_vec(&xm)))) / (2.0 * h);
        jac.set_column(k, &col);
    }
    jac.determinant().abs()
}

/// Relative invariance defects of the two Haar densities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HaarCheck {
    pub left: f64,
    pub right: f64,
}

/// Change-of-variables Monte Carlo: c′ is drawn from a Gaussian in (log s, y), the shifted integral
/// ∫φ(c₀c)ρ(c)dc is estimated through c = c₀⁻¹c′ (resp. c′c₀⁻¹ on the right) and compared with
/// ∫φρ estimated on the same draws.
pub fn haar_invariance_with(
    n: usize,
    samples: usize,
    seed: u64,
    left: &(dyn Fn(&CParam) -> f64 + Sync),
    right: &(dyn Fn(&CParam) -> f64 + Sync),
) -> HaarCheck {
    let chunk = 4096;
    let chunks = samples.div_ceil(chunk);
    let parts: Vec<[f64; 4]> = (0..chunks)
        .into_par_iter()
        .map(|k| {
            let mut rng = stream_rng(seed, k as u64);
            let mut acc = [0.0; 4];
            let count = chunk.min(samples - k * chunk);
            for _ in 0..count {
                let c0 = sample_c(&mut rng, n);
                let u: f64 = rng.sample(rand_distr::StandardNormal);
                let cp = CParam {
                    s: u.exp(),
                    y: gaussian_vec(&mut rng, n),
                };
                // φ(c′)/q(c′) with q the proposal density in ds dy; both sides share it.
                let phi_over_q = cp.s * (2.0 * PI).powf((n as f64 + 1.0) / 2.0);
                let cl = c_mul(&c_inv(&c0), &cp);
                let jl = jacobian_det(&cl, |c| c_mul(&c0, c));
                acc[0] += phi_over_q * left(&cl) / jl;
                acc[1] += phi_over_q * left(&cp);
                let cr = c_mul(&cp, &c_inv(&c0));
                let jr = jacobian_det(&cr, |c| c_mul(c, &c0));
                acc[2] += phi_over_q * right(&cr) / jr;
                acc[3] += phi_over_q * right(&cp);
            }
            acc
        })
        .collect();
    let mut tot = [0.0; 4];
    for p in parts {
        for i in 0..4 {
            tot[i] += p[i];
        }
    }
    HaarCheck {
        left: ((tot[0] - tot[1]) / tot[1]).abs(),
        right: ((tot[2] - tot[3]) / tot[3]).abs(),
    }
}

pub fn haar_invariance(n: usize, samples: usize, seed: u64) -> HaarCheck {
    let h = HaarC::new(n);
    haar_invariance_with(n, samples, seed, &|c| h.left_density(c), &|c| h.right_density(c))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Chart {
    /// (log t, x₁, x₂) on Γ₀, n = 1.
    Gamma0,
    /// (θ, log s, y) on G_B = SO(2) × C, θ periodic on [−π, π).
    BC,
}

impl Chart {
    pub fn id(self) -> f64 {
        match self {
            Chart::Gamma0 => 0.0,
            Chart::BC => 1.0,
        }
    }

    pub fn from_id(id: f64) -> Result<Self> {
        match id as i64 {
            0 => Ok(Chart::Gamma0),
            1 => Ok(Chart::BC),
            _ => Err(Error::Domain(format!("unknown chart id {id}"))),
        }
    }

    fn axis_names(self) -> [&'static str; 3] {
        match self {
            Chart::Gamma0 => ["log_t", "x1", "x2"],
            Chart::BC => ["theta", "log_s", "y"],
        }
    }
}

/// A cell-centered axis: `len` cells covering [lo, hi].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Axis {
    pub lo: f64,
    pub hi: f64,
    pub len: usize,
}

impl Axis {
    pub fn new(lo: f64, hi: f64, len: usize) -> Self {
        Axis { lo, hi, len }
    }

    pub fn step(&self) -> f64 {
        (self.hi - self.lo) / self.len as f64
    }

    pub fn point(&self, i: usize) -> f64 {
        self.lo + (i as f64 + 0.5) * self.step()
    }

    pub fn measure(&self) -> f64 {
        self.hi - self.lo
    }

    fn matches(&self, other: &Axis) -> bool {
        self.len == other.len && (self.lo - other.lo).abs() < 1e-12 && (self.hi - other.hi).abs() < 1e-12
    }

    /// Neighbouring cells and weights for linear interpolation at x.
    fn stencil(&self, x: f64, periodic: bool) -> [(usize, f64); 2] {
        let p = (x - self.lo) / self.step() - 0.5;
        let i0 = p.floor();
        let t = p - i0;
        let n = self.len as i64;
        let idx = |i: i64| -> Option<usize> {
            if periodic {
                Some(i.rem_euclid(n) as usize)
            } else if (0..n).contains(&i) {
                Some(i as usize)
            } else {
                None
            }
        };
        let i0 = i0 as i64;
        let a = idx(i0).map(|i| (i, 1.0 - t)).unwrap_or((0, 0.0));
        let b = idx(i0 + 1).map(|i| (i, t)).unwrap_or((0, 0.0));
        [a, b]
    }
}

/// Samples of f on a product grid whose extent is the declared support box, row-major in
/// (axis 0, axis 1, axis 2).
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    pub chart: Chart,
    pub axes: [Axis; 3],
    pub values: Vec<f64>,
}

const HEADER_LEN: usize = 13;

impl GridFunction {
    pub fn new(chart: Chart, axes: [Axis; 3], values: Vec<f64>) -> Result<Self> {
        let expected = axes.iter().map(|a| a.len).product();
        if values.len() != expected {
            return Err(Error::Dimension {
                expected,
                got: values.len(),
            });
        }
        if axes.iter().any(|a| a.len == 0 || !(a.hi > a.lo)) {
            return Err(Error::Domain("empty grid axis".into()));
        }
        if chart == Chart::BC && ((axes[0].lo + PI).abs() > 1e-12 || (axes[0].hi - PI).abs() > 1e-12) {
            return Err(Error::Domain("BC chart needs theta on [-pi, pi]".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("non-finite sample".into()));
        }
        Ok(GridFunction { chart, axes, values })
    }

    pub fn from_fn<F: Fn(f64, f64, f64) -> f64 + Sync>(chart: Chart, axes: [Axis; 3], f: F) -> Result<Self> {
        let (n1, n2) = (axes[1].len, axes[2].len);
        let values = (0..axes[0].len * n1 * n2)
            .into_par_iter()
            .map(|k| f(axes[0].point(k / (n1 * n2)), axes[1].point(k / n2 % n1), axes[2].point(k % n2)))
            .collect();
        GridFunction::new(chart, axes, values)
    }

    pub fn zeros(chart: Chart, axes: [Axis; 3]) -> Self {
        let len = axes.iter().map(|a| a.len).product();
        GridFunction {
            chart,
            axes,
            values: vec![0.0; len],
        }
    }

    /// BC-chart axes with `len` cells each and |log s|, |y| ≤ half_width.
    pub fn bc_axes(len: usize, half_width: f64) -> [Axis; 3] {
        [
            Axis::new(-PI, PI, len),
            Axis::new(-half_width, half_width, len),
            Axis::new(-half_width, half_width, len),
        ]
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.axes[1].len + j) * self.axes[2].len + k
    }

    pub fn at(&self, i: usize, j: usize, k: usize) -> f64 {
        self.values[self.index(i, j, k)]
    }

    /// Trilinear interpolation; zero outside the box, periodic in θ on the BC chart.
    pub fn interp(&self, x: [f64; 3]) -> f64 {
        let periodic = self.chart == Chart::BC;
        let s0 = self.axes[0].stencil(x[0], periodic);
        let s1 = self.axes[1].stencil(x[1], false);
        let s2 = self.axes[2].stencil(x[2], false);
        let mut v = 0.0;
        for &(i, wi) in &s0 {
            if wi == 0.0 {
                continue;
            }
            for &(j, wj) in &s1 {
                if wj == 0.0 {
                    continue;
                }
                let base = (i * self.axes[1].len + j) * self.axes[2].len;
                for &(k, wk) in &s2 {
                    if wk != 0.0 {
                        v += wi * wj * wk * self.values[base + k];
                    }
                }
            }
        }
        v
    }

    pub fn sup(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Largest |value| on the outermost cells of the non-periodic axes.
    pub fn boundary_max(&self) -> f64 {
        let [a0, a1, a2] = self.axes;
        let first = if self.chart == Chart::BC { 1 } else { 0 };
        let mut m: f64 = 0.0;
        for i in 0..a0.len {
            for j in 0..a1.len {
                for k in 0..a2.len {
                    let edge = (first == 0 && (i == 0 || i + 1 == a0.len))
                        || j == 0
                        || j + 1 == a1.len
                        || k == 0
                        || k + 1 == a2.len;
                    if edge {
                        m = m.max(self.at(i, j, k).abs());
                    }
                }
            }
        }
        m
    }

    fn same_grid(&self, other: &GridFunction) -> Result<()> {
        if self.chart != other.chart || !self.axes.iter().zip(&other.axes).all(|(a, b)| a.matches(b)) {
            return Err(Error::Domain("grid mismatch".into()));
        }
        Ok(())
    }

    /// sup |self − other| on a common grid.
    pub fn max_abs_diff(&self, other: &GridFunction) -> Result<f64> {
        self.same_grid(other)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs())))
    }

    /// Header of 13 little-endian f64 (chart id, dims, steps, box) followed by the samples.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut head = vec![self.chart.id()];
        head.extend(self.axes.iter().map(|a| a.len as f64));
        head.extend(self.axes.iter().map(|a| a.step()));
        for a in &self.axes {
            head.push(a.lo);
            head.push(a.hi);
        }
        head.iter()
            .chain(&self.values)
            .flat_map(|v| v.to_le_bytes())
            .collect()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() % 8 != 0 || bytes.len() < 8 * HEADER_LEN {
            return Err(Error::Domain("truncated grid file".into()));
        }
        let nums: Vec<f64> = bytes
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().expect("8-byte chunk")))
            .collect();
        let chart = Chart::from_id(nums[0])?;
        let mut axes = [Axis::new(0.0, 1.0, 1); 3];
        for (k, axis) in axes.iter_mut().enumerate() {
            let len = nums[1 + k];
            if !(len >= 1.0 && len.fract() == 0.0) {
                return Err(Error::Domain("bad grid dimension".into()));
            }
            *axis = Axis::new(nums[7 + 2 * k], nums[8 + 2 * k], len as usize);
            if (axis.step() - nums[4 + k]).abs() > 1e-12 * axis.step().abs().max(1.0) {
                return Err(Error::Domain("grid step disagrees with box".into()));
            }
        }
        GridFunction::new(chart, axes, nums[HEADER_LEN..].to_vec())
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let names = self.chart.axis_names();
        let io = |e: csv::Error| Error::Io(e.to_string());
        w.write_record([names[0], names[1], names[2], "value"]).map_err(io)?;
        for i in 0..self.axes[0].len {
            for j in 0..self.axes[1].len {
                for k in 0..self.axes[2].len {
                    w.write_record(&[
                        self.axes[0].point(i).to_string(),
                        self.axes[1].point(j).to_string(),
                        self.axes[2].point(k).to_string(),
                        self.at(i, j, k).to_string(),
                    ])
                    .map_err(io)?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// The rotation by θ in SO(2), as an element of B for n = 1.
pub fn b_of_theta(theta: f64) -> BParam {
    let (s, c) = theta.sin_cos();
    BParam::from_block(&DMatrix::from_row_slice(2, 2, &[c, -s, s, c]))
}

pub fn theta_of_b(b: &BParam) -> f64 {
    b.w[0].atan2(b.alpha)
}

fn c_of(u: f64, y: f64) -> CParam {
    CParam {
        s: u.exp(),
        y: DVector::from_element(1, y),
    }
}

/// θ of b_R(b_θ·c) at every BC-grid node.
fn right_base_table(axes: &[Axis; 3]) -> Result<Vec<f64>> {
    let (n1, n2) = (axes[1].len, axes[2].len);
    (0..axes[0].len * n1 * n2)
        .into_par_iter()
        .map(|k| {
            let b = b_of_theta(axes[0].point(k / (n1 * n2)));
            let c = c_of(axes[1].point(k / n2 % n1), axes[2].point(k % n2));
            Ok(theta_of_b(&b_r(&b, &c)?))
        })
        .collect()
}

fn require_chart(f: &GridFunction, chart: Chart) -> Result<()> {
    if f.chart != chart {
        return Err(Error::Domain(format!("expected a {chart:?}-chart grid function")));
    }
    Ok(())
}

/// f₁ * f₂. On the BC chart this is the quadrature of
/// ∫ d_lc f₁(b_L(g)c) f₂(c_L(b_L(g)c)⁻¹g), i.e. f₁(θ, c) f₂(b_R(b_θc), c⁻¹c_g); on the Γ₀ chart it is
/// ∫ ds/s dy f₁(s, x₁, y) f₂(t/s, y, x₂), evaluated exactly on the shifted output grid.
pub fn convolve(f1: &GridFunction, f2: &GridFunction) -> Result<GridFunction> {
    match f1.chart {
        Chart::BC => {
            f1.same_grid(f2)?;
            let table = right_base_table(&f1.axes)?;
            Ok(convolve_bc(f1, f2, &table))
        }
        Chart::Gamma0 => convolve_gamma0(f1, f2),
    }
}

fn convolve_bc(f1: &GridFunction, f2: &GridFunction, table: &[f64]) -> GridFunction {
    let [at, au, ay] = f1.axes;
    let w = au.step() * ay.step();
    let (nu, ny) = (au.len, ay.len);
    let values = (0..at.len * nu * ny)
        .into_par_iter()
        .map(|k| {
            let it = k / (nu * ny);
            let ug = au.point(k / ny % nu);
            let yg = ay.point(k % ny);
            let mut acc = 0.0;
            for i in 0..nu {
                let u = au.point(i);
                let sg_over_s = (ug - u).exp();
                for j in 0..ny {
                    let idx = f1.index(it, i, j);
                    let a = f1.values[idx];
                    if a == 0.0 {
                        continue;
                    }
                    acc += a * f2.interp([table[idx], ug - u, yg - sg_over_s * ay.point(j)]);
                }
            }
            acc * w
        })
        .collect();
    GridFunction {
        chart: Chart::BC,
        axes: f1.axes,
        values,
    }
}

fn convolve_gamma0(f1: &GridFunction, f2: &GridFunction) -> Result<GridFunction> {
    require_chart(f2, Chart::Gamma0)?;
    let [u1, x1, y1] = f1.axes;
    let [u2, y2, x2] = f2.axes;
    if !y1.matches(&y2) || (u1.step() - u2.step()).abs() > 1e-12 {
        return Err(Error::Domain("grid mismatch".into()));
    }
    let h = u1.step();
    let uo = Axis::new(u1.lo + u2.lo + h / 2.0, u1.hi + u2.hi - h / 2.0, u1.len + u2.len - 1);
    let w = h * y1.step();
    let (na, nb) = (x1.len, x2.len);
    let values = (0..uo.len * na * nb)
        .into_par_iter()
        .map(|k| {
            let t = k / (na * nb);
            let a = k / nb % na;
            let b = k % nb;
            let mut acc = 0.0;
            for i in t.saturating_sub(u2.len - 1)..=t.min(u1.len - 1) {
                for j in 0..y1.len {
                    acc += f1.at(i, a, j) * f2.at(t - i, j, b);
                }
            }
            acc * w
        })
        .collect();
    GridFunction::new(Chart::Gamma0, [uo, x1, x2], values)
}

/// f*(γ) = f(s(γ)) for real f: on the BC chart s(b, c) = (b_R(bc), c⁻¹), on Γ₀
/// s(t, x₁, x₂) = (1/t, x₂, x₁).
pub fn star(f: &GridFunction) -> Result<GridFunction> {
    match f.chart {
        Chart::BC => {
            let table = right_base_table(&f.axes)?;
            Ok(star_bc(f, &table))
        }
        Chart::Gamma0 => {
            let [u, x1, x2] = f.axes;
            let axes = [Axis::new(-u.hi, -u.lo, u.len), x2, x1];
            let mut out = GridFunction::zeros(Chart::Gamma0, axes);
            for i in 0..u.len {
                for a in 0..x2.len {
                    for b in 0..x1.len {
                        let idx = out.index(i, a, b);
                        out.values[idx] = f.at(u.len - 1 - i, b, a);
                    }
                }
            }
            Ok(out)
        }
    }
}

fn star_bc(f: &GridFunction, table: &[f64]) -> GridFunction {
    let [at, au, ay] = f.axes;
    let (nu, ny) = (au.len, ay.len);
    let values = (0..at.len * nu * ny)
        .into_par_iter()
        .map(|k| {
            let u = au.point(k / ny % nu);
            let y = ay.point(k % ny);
            f.interp([table[k], -u, -y * (-u).exp()])
        })
        .collect();
    GridFunction {
        chart: Chart::BC,
        axes: f.axes,
        values,
    }
}

/// Largest fiber integral of |f| over the fibers indexed by `axis` (BC: the θ axis).
fn fiber_sup(f: &GridFunction, axis: usize) -> f64 {
    let [a0, a1, a2] = f.axes;
    let cell = a0.step() * a1.step() * a2.step() / f.axes[axis].step();
    let mut sums = vec![0.0; f.axes[axis].len];
    for i in 0..a0.len {
        for j in 0..a1.len {
            for k in 0..a2.len {
                sums[[i, j, k][axis]] += f.at(i, j, k).abs();
            }
        }
    }
    sums.into_iter().fold(0.0, f64::max) * cell
}

/// ‖f‖₀ = max of the left- and right-fiber sups of ∫|f|.
pub fn norm0(f: &GridFunction) -> Result<f64> {
    Ok(match f.chart {
        Chart::BC => fiber_sup(f, 0).max(fiber_sup(&star(f)?, 0)),
        Chart::Gamma0 => fiber_sup(f, 1).max(fiber_sup(f, 2)),
    })
}

/// π(f)Ψ on the Γ₀ chart.
pub fn pi_apply(f: &GridFunction, psi: &GridFunction) -> Result<GridFunction> {
    require_chart(f, Chart::Gamma0)?;
    convolve_gamma0(f, psi)
}

/// A product box M × N × R in (log t, x₁, x₂).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SupportBox {
    pub m: (f64, f64),
    pub n: (f64, f64),
    pub r: (f64, f64),
}

impl SupportBox {
    pub fn of_grid(f: &GridFunction) -> Self {
        let [u, x1, x2] = f.axes;
        SupportBox {
            m: (u.lo, u.hi),
            n: (x1.lo, x1.hi),
            r: (x2.lo, x2.hi),
        }
    }

    fn contains(&self, x: [f64; 3]) -> bool {
        let inside = |(lo, hi): (f64, f64), v: f64| lo <= v && v <= hi;
        inside(self.m, x[0]) && inside(self.n, x[1]) && inside(self.r, x[2])
    }

    /// sup|f| ν(M) √(μ(N)μ(R)); ν(M) is the ds/s measure, i.e. the length in log t.
    pub fn bound(&self, sup: f64) -> f64 {
        sup * (self.m.1 - self.m.0) * ((self.n.1 - self.n.0) * (self.r.1 - self.r.0)).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridOperatorEstimate {
    pub estimate: f64,
    pub bound: f64,
    pub norm0: f64,
    pub slack: f64,
}

impl GridOperatorEstimate {
    pub fn within_bound(&self) -> bool {
        self.estimate <= self.bound * (1.0 + self.slack)
    }
}

/// Default quadrature slack of the operator-norm checks.
pub const SLACK: f64 = 0.05;

/// The operator ψ(u, y) ↦ Σ f(u′, x₁, y) ψ(u − u′, y) with quadrature weights, on an input line of
/// `pad` u-cells with full-length output. x₂ passes through π(f) unchanged, so this reduced kernel
/// carries the whole norm.
struct ReducedKernel {
    f: Vec<f64>,
    nu: usize,
    xw: Vec<f64>,
    yw: Vec<f64>,
    hu: f64,
    pad: usize,
}

impl ReducedKernel {
    fn na(&self) -> usize {
        self.xw.len()
    }

    fn nj(&self) -> usize {
        self.yw.len()
    }

    /// The kernel with quadrature weights folded in, laid out as [i][a][j].
    fn weighted(&self) -> Vec<f64> {
        let (na, nj) = (self.na(), self.nj());
        (0..self.nu * na * nj)
            .map(|k| self.hu * (self.xw[k / nj % na] * self.yw[k % nj]).sqrt() * self.f[k])
            .collect()
    }

    fn apply(&self, q: &[f64], v: &[f64]) -> Vec<f64> {
        let (na, nj) = (self.na(), self.nj());
        let mut out = vec![0.0; (self.pad + self.nu - 1) * na];
        for k in 0..self.pad {
            let vk = &v[k * nj..(k + 1) * nj];
            for i in 0..self.nu {
                let row = &mut out[(k + i) * na..(k + i + 1) * na];
                for (a, o) in row.iter_mut().enumerate() {
                    let qa = &q[(i * na + a) * nj..(i * na + a + 1) * nj];
                    *o += qa.iter().zip(vk).map(|(x, y)| x * y).sum::<f64>();
                }
            }
        }
        out
    }

    fn apply_t(&self, q: &[f64], w: &[f64]) -> Vec<f64> {
        let (na, nj) = (self.na(), self.nj());
        let mut out = vec![0.0; self.pad * nj];
        for k in 0..self.pad {
            let ok = &mut out[k * nj..(k + 1) * nj];
            for i in 0..self.nu {
                for a in 0..na {
                    let x = w[(k + i) * na + a];
                    if x == 0.0 {
                        continue;
                    }
                    let qa = &q[(i * na + a) * nj..(i * na + a + 1) * nj];
                    ok.iter_mut().zip(qa).for_each(|(o, c)| *o += c * x);
                }
            }
        }
        out
    }

    fn norm_estimate(&self, seed: u64) -> f64 {
        let mut rng = stream_rng(seed, 0);
        let mut v: Vec<f64> = (0..self.pad * self.nj()).map(|_| rng.random_range(0.5..1.0)).collect();
        let norm = |x: &[f64]| x.iter().map(|t| t * t).sum::<f64>().sqrt();
        let q = self.weighted();
        let mut est = 0.0;
        for _ in 0..300 {
            let nv = norm(&v);
            if nv == 0.0 {
                return 0.0;
            }
            v.iter_mut().for_each(|t| *t /= nv);
            let w = self.apply(&q, &v);
            let next = norm(&w);
            v = self.apply_t(&q, &w);
            if (next - est).abs() <= 1e-9 * next {
                return next;
            }
            est = next;
        }
        est
    }
}

fn kernel_of(f: &GridFunction, pad_factor: usize) -> ReducedKernel {
    let [u, x1, x2] = f.axes;
    ReducedKernel {
        f: f.values.clone(),
        nu: u.len,
        xw: vec![x1.step(); x1.len],
        yw: vec![x2.step(); x2.len],
        hu: u.step(),
        pad: pad_factor * u.len,
    }
}

/// Power-iteration estimate of ‖π(f)‖ against sup|f| ν(M) √(μ(N)μ(R)).
pub fn pi_norm_check(f: &GridFunction, support: &SupportBox) -> Result<GridOperatorEstimate> {
    require_chart(f, Chart::Gamma0)?;
    let [u, x1, x2] = f.axes;
    for i in 0..u.len {
        for a in 0..x1.len {
            for b in 0..x2.len {
                if f.at(i, a, b) != 0.0 && !support.contains([u.point(i), x1.point(a), x2.point(b)]) {
                    return Err(Error::Domain("function not supported in the declared box".into()));
                }
            }
        }
    }
    Ok(GridOperatorEstimate {
        estimate: kernel_of(f, 8).norm_estimate(17),
        bound: support.bound(f.sup()),
        norm0: norm0(f)?,
        slack: SLACK,
    })
}

/// exp(1 − 1/(1 − r²)) on |r| < 1: smooth, 1 at r = 0.
pub fn bump(r: f64) -> f64 {
    if r.abs() >= 1.0 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - r * r)).exp()
    }
}

/// χ̃_ε: bumps of half-width ε/4 centred at x₁ = ±1, so μ(𝒪_ε) = ε.
pub fn chi_eps(eps: f64, x1: f64) -> f64 {
    bump((x1.abs() - 1.0) / (eps / 4.0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChiEpsPoint {
    pub eps: f64,
    pub estimate: f64,
    pub bound: f64,
}

/// ‖π(χ_ε f)‖ for each ε, on a refined x₁ grid covering the collar 𝒪_ε ∩ N.
pub fn chi_eps_experiment(f: &GridFunction, eps_list: &[f64], collar_cells: usize) -> Result<Vec<ChiEpsPoint>> {
    require_chart(f, Chart::Gamma0)?;
    let support = SupportBox::of_grid(f);
    let [u, x1, x2] = f.axes;
    let sup = f.sup();
    eps_list
        .iter()
        .map(|&eps| {
            if !(eps > 0.0) {
                return Err(Error::Config("eps must be positive".into()));
            }
            let mut xs = Vec::new();
            let mut xw = Vec::new();
            let mut collar = 0.0;
            for centre in [-1.0, 1.0] {
                let lo = (centre - eps / 4.0_f64).max(x1.lo);
                let hi = (centre + eps / 4.0_f64).min(x1.hi);
                if hi <= lo {
                    continue;
                }
                collar += hi - lo;
                let ax = Axis::new(lo, hi, collar_cells);
                for k in 0..collar_cells {
                    xs.push(ax.point(k));
                    xw.push(ax.step());
                }
            }
            let mut vals = Vec::with_capacity(u.len * xs.len() * x2.len);
            for i in 0..u.len {
                for &x in &xs {
                    for b in 0..x2.len {
                        vals.push(chi_eps(eps, x) * f.interp([u.point(i), x, x2.point(b)]));
                    }
                }
            }
            let estimate = if xs.is_empty() {
                0.0
            } else {
                ReducedKernel {
                    f: vals,
                    nu: u.len,
                    xw,
                    yw: vec![x2.step(); x2.len],
                    hu: u.step(),
                    pad: 8 * u.len,
                }
                .norm_estimate(17)
            };
            let bound = sup * (support.m.1 - support.m.0) * (support.r.1 - support.r.0).sqrt() * collar.sqrt();
            Ok(ChiEpsPoint { eps, estimate, bound })
        })
        .collect()
}

/// (Bc₀f)(g) = f(B(c₀)⁻¹g) j_C(c₀)^{−1/2} at a single point.
pub fn density_bisection_at(c0: &CParam, f: &dyn Fn(&GroupoidPoint) -> f64, g: &GroupoidPoint) -> Result<f64> {
    Ok(f(&bisection_apply(&c_inv(c0), g)?) / j_c_of(c0).sqrt())
}

/// The bisection action on a BC-chart grid function, by interpolation.
pub fn density_bisection(c0: &CParam, f: &GridFunction) -> Result<GridFunction> {
    require_chart(f, Chart::BC)?;
    if c0.n() != 1 {
        return Err(Error::Dimension {
            expected: 1,
            got: c0.n(),
        });
    }
    let [at, au, ay] = f.axes;
    let (nu, ny) = (au.len, ay.len);
    let scale = j_c_of(c0).powf(-0.5);
    let ci = c_inv(c0);
    let values = (0..at.len * nu * ny)
        .into_par_iter()
        .map(|k| {
            let g = GroupoidPoint::new(b_of_theta(at.point(k / (nu * ny))), c_of(au.point(k / ny % nu), ay.point(k % ny)));
            let h = bisection_apply(&ci, &g)?;
            Ok(scale * f.interp([theta_of_b(&h.b), h.c.s.ln(), h.c.y[0]]))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(GridFunction {
        chart: Chart::BC,
        axes: f.axes,
        values,
    })
}

/// Midpoint nodes of a box in (log s, y) carrying the d_lc = ds dy/s = d(log s) dy weights.
#[derive(Debug, Clone)]
pub struct CQuad {
    pub nodes: Vec<(CParam, f64)>,
}

impl CQuad {
    pub fn boxed(n: usize, half_u: f64, half_y: f64, m: usize) -> Self {
        let au = Axis::new(-half_u, half_u, m);
        let ay = Axis::new(-half_y, half_y, m);
        let w = au.step() * ay.step().powi(n as i32);
        let total = m.pow(n as u32 + 1);
        let nodes = (0..total)
            .map(|mut k| {
                let u = au.point(k % m);
                let y = DVector::from_fn(n, |_, _| {
                    k /= m;
                    ay.point(k % m)
                });
                (CParam { s: u.exp(), y }, w)
            })
            .collect();
        CQuad { nodes }
    }
}

type PointFn<'a> = dyn Fn(&GroupoidPoint) -> f64 + Sync + 'a;
type PairPointFn<'a> = dyn Fn(&GroupoidPoint, &GroupoidPoint) -> f64 + Sync + 'a;

/// (f₁ * f₂)(g) = ∫ d_lc f₁(b_L(g)c) f₂(c_L(b_L(g)c)⁻¹g) by quadrature, any n.
pub fn convolve_at(f1: &PointFn, f2: &PointFn, g: &GroupoidPoint, q: &CQuad) -> Result<f64> {
    let mut acc = 0.0;
    for (c, w) in &q.nodes {
        let a = f1(&GroupoidPoint::new(g.b.clone(), c.clone()));
        if a == 0.0 {
            continue;
        }
        let second = GroupoidPoint::new(b_r(&g.b, c)?, c_mul(&c_inv(c), &g.c));
        acc += w * a * f2(&second);
    }
    Ok(acc)
}

/// (δ̂₀(f)F)(b₁c₁, b₂c₂) = ∫ d_lc j_C(c_L(b₂c))^{−1/2} f(b₁b₂c) F(c_L(b₁b₂c)⁻¹b₁c₁, b_R(b₂c)c⁻¹c₂).
pub fn delta0_hat_at(f: &PointFn, big_f: &PairPointFn, g1: &GroupoidPoint, g2: &GroupoidPoint, q: &CQuad) -> Result<f64> {
    let b12 = g1.b.mul(&g2.b);
    let mut acc = 0.0;
    for (c, w) in &q.nodes {
        let fv = f(&GroupoidPoint::new(b12.clone(), c.clone()));
        if fv == 0.0 {
            continue;
        }
        let cl12 = swap_bc_to_cb(&b12, c)?.c;
        let right = swap_bc_to_cb(&g2.b, c)?;
        let left = factor_bc(&embed_c(&c_inv(&cl12)).mul(&g1.matrix()))?;
        let x1 = GroupoidPoint::new(left.b, left.c);
        let x2 = GroupoidPoint::new(right.b, c_mul(&c_inv(c), &g2.c));
        acc += w * fv * big_f(&x1, &x2) / j_c_of(&right.c).sqrt();
    }
    Ok(acc)
}

/// A smooth test function on G_B: von Mises-like in b times a Gaussian in (log s, y).
#[derive(Debug, Clone, PartialEq)]
pub struct BumpFn {
    pub amp: f64,
    pub kappa: f64,
    pub dir: DVector<f64>,
    pub u0: f64,
    pub y0: DVector<f64>,
    pub sigma: f64,
}

impl BumpFn {
    pub fn random(rng: &mut ChaCha8Rng, n: usize, sigma: f64, spread: f64) -> Self {
        let mut dir = gaussian_vec(rng, n + 1);
        dir /= dir.norm();
        BumpFn {
            amp: rng.random_range(0.5..1.5),
            kappa: rng.random_range(0.5..2.0),
            dir,
            u0: rng.random_range(-spread..spread),
            y0: DVector::from_fn(n, |_, _| rng.random_range(-spread..spread)),
            sigma,
        }
    }

    /// The last column of the block of b, paired with `dir`.
    fn b_part(&self, b: &BParam) -> f64 {
        let n = b.n();
        let mut col = b.u.clone().insert_row(n, b.alpha);
        col.iter_mut().zip(self.dir.iter()).for_each(|(x, d)| *x *= d);
        (self.kappa * (col.sum() - 1.0)).exp()
    }

    pub fn eval(&self, g: &GroupoidPoint) -> f64 {
        let du = g.c.s.ln() - self.u0;
        let dy = (&g.c.y - &self.y0).norm_squared();
        self.amp * self.b_part(&g.b) * (-(du * du + dy) / (2.0 * self.sigma * self.sigma)).exp()
    }

    pub fn eval_chart(&self, theta: f64, u: f64, y: f64) -> f64 {
        self.eval(&GroupoidPoint::new(b_of_theta(theta), c_of(u, y)))
    }

    pub fn grid(&self, axes: [Axis; 3]) -> Result<GridFunction> {
        GridFunction::from_fn(Chart::BC, axes, |t, u, y| self.eval_chart(t, u, y))
    }
}

/// Quadrature tolerance 4h² of the interpolating BC-grid operations, h the log s step.
pub fn quad_tol(axes: &[Axis; 3]) -> f64 {
    4.0 * axes[1].step().powi(2)
}

/// Sup-norm relative difference.
fn rel(a: &GridFunction, b: &GridFunction) -> Result<f64> {
    Ok(a.max_abs_diff(b)? / a.sup().max(b.sup()).max(1e-300))
}

/// Associativity, involution and anti-multiplicativity defects on a BC grid of the given size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlgebraDefects {
    pub grid: usize,
    pub associativity: f64,
    pub involution: f64,
    pub anti_multiplicativity: f64,
    pub submultiplicativity: f64,
}

/// Half-width of the BC-grid box in log s and y.
pub const BC_HALF_WIDTH: f64 = 2.5;
const BC_SIGMA: f64 = 0.3;

pub fn algebra_defects(grid: usize, seed: u64) -> Result<AlgebraDefects> {
    algebra_defects_with(grid, seed, BC_SIGMA, BC_HALF_WIDTH)
}

pub fn algebra_defects_with(grid: usize, seed: u64, sigma: f64, half_width: f64) -> Result<AlgebraDefects> {
    let mut rng = stream_rng(seed, 0xC0);
    let fs: Vec<BumpFn> = (0..3).map(|_| BumpFn::random(&mut rng, 1, sigma, 0.3)).collect();
    let axes = GridFunction::bc_axes(grid, half_width);
    let table = right_base_table(&axes)?;
    let g: Vec<GridFunction> = fs.iter().map(|f| f.grid(axes)).collect::<Result<_>>()?;
    let g12 = convolve_bc(&g[0], &g[1], &table);
    let g23 = convolve_bc(&g[1], &g[2], &table);
    let left = convolve_bc(&g12, &g[2], &table);
    let right = convolve_bc(&g[0], &g23, &table);
    let stars: Vec<GridFunction> = g.iter().map(|x| star_bc(x, &table)).collect();
    let involution = rel(&star_bc(&stars[0], &table), &g[0])?;
    let anti = rel(&star_bc(&g12, &table), &convolve_bc(&stars[1], &stars[0], &table))?;
    let sub = norm0(&g12)? / (norm0(&g[0])? * norm0(&g[1])?);
    Ok(AlgebraDefects {
        grid,
        associativity: rel(&left, &right)?,
        involution,
        anti_multiplicativity: anti,
        submultiplicativity: sub,
    })
}

/// The product f₁ * f₂ of the first two bump functions used by [`algebra_defects`], on the BC grid.
pub fn sample_product(grid: usize, seed: u64) -> Result<GridFunction> {
    let mut rng = stream_rng(seed, 0xC0);
    let f1 = BumpFn::random(&mut rng, 1, BC_SIGMA, 0.3);
    let f2 = BumpFn::random(&mut rng, 1, BC_SIGMA, 0.3);
    let axes = GridFunction::bc_axes(grid, BC_HALF_WIDTH);
    convolve(&f1.grid(axes)?, &f2.grid(axes)?)
}

/// Random product-bump function on the Γ₀ chart, supported in a random box that is also the grid
/// extent, with a signed smooth modulation.
pub fn random_boxed(rng: &mut ChaCha8Rng, cells: usize) -> Result<(GridFunction, SupportBox)> {
    let mut interval = |len_lo: f64, len_hi: f64| {
        let len = rng.random_range(len_lo..len_hi);
        let lo = rng.random_range(-1.0..1.0);
        (lo, lo + len)
    };
    let sb = SupportBox {
        m: interval(0.5, 2.0),
        n: interval(0.5, 2.0),
        r: interval(0.5, 2.0),
    };
    let amp = rng.random_range(0.5..2.0);
    let k: [f64; 3] = [rng.random_range(0.0..3.0), rng.random_range(0.0..3.0), rng.random_range(0.0..3.0)];
    let phase = rng.random_range(0.0..2.0 * PI);
    let mix = rng.random_range(0.0..1.0);
    let axes = [
        Axis::new(sb.m.0, sb.m.1, cells),
        Axis::new(sb.n.0, sb.n.1, cells),
        Axis::new(sb.r.0, sb.r.1, cells),
    ];
    let rel_r = |(lo, hi): (f64, f64), x: f64| (2.0 * x - lo - hi) / (hi - lo);
    let f = GridFunction::from_fn(Chart::Gamma0, axes, |u, a, b| {
        let env = bump(rel_r(sb.m, u)) * bump(rel_r(sb.n, a)) * bump(rel_r(sb.r, b));
        amp * env * ((1.0 - mix) + mix * (k[0] * u + k[1] * a + k[2] * b + phase).cos())
    })?;
    Ok((f, sb))
}

/// A plateau of height 1 on the inner 80% of [−1, 1], smoothly cut off.
fn plateau(r: f64) -> f64 {
    let psi = |x: f64| if x > 0.0 { (-1.0 / x).exp() } else { 0.0 };
    let t = (r.abs() - 0.8) / 0.2;
    psi(1.0 - t) / (psi(1.0 - t) + psi(t))
}

/// Indicator-like function on M = [1, e] (log t ∈ [0, 1]) and unit intervals N, R.
pub fn indicator_like(cells: usize) -> Result<(GridFunction, SupportBox)> {
    let sb = SupportBox {
        m: (0.0, 1.0),
        n: (0.0, 1.0),
        r: (0.0, 1.0),
    };
    let axes = [Axis::new(0.0, 1.0, cells); 3];
    let f = GridFunction::from_fn(Chart::Gamma0, axes, |u, a, b| {
        plateau(2.0 * u - 1.0) * plateau(2.0 * a - 1.0) * plateau(2.0 * b - 1.0)
    })?;
    Ok((f, sb))
}

/// Function on the Γ₀ chart with N = [−1.5, 1.5] straddling both points of the unit sphere.
pub fn chi_test_function(cells: usize) -> Result<GridFunction> {
    let axes = [Axis::new(0.0, 1.0, cells), Axis::new(-1.5, 1.5, cells), Axis::new(-1.0, 1.0, cells)];
    GridFunction::from_fn(Chart::Gamma0, axes, |u, a, b| {
        bump(2.0 * u - 1.0) * bump(a / 1.5) * bump(b) * (1.0 + 0.5 * (2.0 * a + b).sin())
    })
}

/// Pointwise bisection checks: the group law and the generator formula
/// d/dt|₀ (B(e^{tċ})f)(g) = −(X^r_ċ f + ½Tr(ad ċ|_𝔠) f)(g).
pub fn bisection_residuals(n: usize, seed: u64, samples: usize, h: f64) -> Result<(f64, f64)> {
    let tr = tr_ad_c(n);
    let rows: Vec<(f64, f64)> = (0..samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(seed ^ 0xB15E, i as u64);
            let f = BumpFn::random(&mut rng, n, 0.8, 0.5);
            let fe = |g: &GroupoidPoint| f.eval(g);
            let g = GroupoidPoint::new(crate::groups::sample_b(&mut rng, n), sample_c(&mut rng, n));
            let c0 = c_exp(&(gaussian_vec(&mut rng, n + 1) * 0.5));
            let c1 = c_exp(&(gaussian_vec(&mut rng, n + 1) * 0.5));
            let inner = |x: &GroupoidPoint| density_bisection_at(&c1, &fe, x).unwrap_or(f64::NAN);
            let twice = density_bisection_at(&c0, &inner, &g)?;
            let once = density_bisection_at(&c_mul(&c0, &c1), &fe, &g)?;
            let law = (twice - once).abs() / once.abs().max(twice.abs()).max(1e-300);

            let cdot = gaussian_vec(&mut rng, n + 1);
            let act = |t: f64| density_bisection_at(&c_exp(&(&cdot * t)), &fe, &g);
            let lhs = (act(h)? - act(-h)?) / (2.0 * h);
            let v = c_element(n, &(ad_c(&embed_b(&g.b)) * &cdot));
            let gm = g.matrix();
            let along = |t: f64| -> Result<f64> {
                let m: GroupMatrix = mat_exp(&v.scale(t)).mul(&gm);
                let bc = factor_bc(&m)?;
                Ok(f.eval(&GroupoidPoint::new(bc.b, bc.c)))
            };
            let xr = (along(h)? - along(-h)?) / (2.0 * h);
            let rhs = -(xr + 0.5 * tr.dot(&cdot) * f.eval(&g));
            let gen = (lhs - rhs).abs() / lhs.abs().max(rhs.abs()).max(f.eval(&g).abs()).max(1e-12);
            Ok((law, gen))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(rows.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a.max(*x), b.max(*y))))
}

/// δ̂₀ checks at n = 1: the right-module property in the second factor and the multiplier limit
/// δ̂₀(φ⊗η_σ)F → Δ_B(φ)F as the C-factor η_σ concentrates at the unit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Delta0Defects {
    pub module: f64,
    pub multiplier: [f64; 2],
}

pub fn delta0_defects(seed: u64, points: usize, m: usize, half_width: f64) -> Result<Delta0Defects> {
    let n = 1;
    let mut rng = stream_rng(seed, 0xD0);
    let f = BumpFn::random(&mut rng, n, 0.4, 0.2);
    let f1 = BumpFn::random(&mut rng, n, 0.5, 0.2);
    let f2 = BumpFn::random(&mut rng, n, 0.5, 0.2);
    let hf = BumpFn::random(&mut rng, n, 0.4, 0.2);
    let big_f = |x: &GroupoidPoint, y: &GroupoidPoint| f1.eval(x) * f2.eval(y);
    let q = CQuad::boxed(n, half_width, half_width, m);
    let fe = |g: &GroupoidPoint| f.eval(g);
    let he = |g: &GroupoidPoint| hf.eval(g);
    let pts: Vec<(GroupoidPoint, GroupoidPoint)> = (0..points)
        .map(|_| {
            let mut pt = || GroupoidPoint::new(b_of_theta(rng.random_range(-PI..PI)), c_of(rng.random_range(-0.3..0.3), rng.random_range(-0.3..0.3)));
            (pt(), pt())
        })
        .collect();
    let module = pts
        .par_iter()
        .map(|(g1, g2)| -> Result<f64> {
            // F·(1⊗H) in the second slot.
            let fh = |x: &GroupoidPoint, y: &GroupoidPoint| {
                convolve_at(&|z: &GroupoidPoint| big_f(x, z), &he, y, &q).unwrap_or(f64::NAN)
            };
            let lhs = delta0_hat_at(&fe, &fh, g1, g2, &q)?;
            let df = |x: &GroupoidPoint, z: &GroupoidPoint| delta0_hat_at(&fe, &big_f, x, z, &q).unwrap_or(f64::NAN);
            let rhs = convolve_at(&|z: &GroupoidPoint| df(g1, z), &he, g2, &q)?;
            Ok((lhs - rhs).abs() / lhs.abs().max(rhs.abs()).max(1e-300))
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(0.0, f64::max);

    let mut multiplier = [0.0; 2];
    for (slot, sigma) in [0.04, 0.02].into_iter().enumerate() {
        let norm = 1.0 / (2.0 * PI * sigma * sigma);
        let eta = |g: &GroupoidPoint| {
            let u = g.c.s.ln();
            f.b_part(&g.b) * norm * (-(u * u + g.c.y.norm_squared()) / (2.0 * sigma * sigma)).exp()
        };
        let qs = CQuad::boxed(n, 6.0 * sigma, 6.0 * sigma, 24);
        for (g1, g2) in &pts {
            let got = delta0_hat_at(&eta, &big_f, g1, g2, &qs)?;
            let want = f.b_part(&g1.b.mul(&g2.b)) * big_f(g1, g2);
            let scale = f1.amp * f2.amp;
            multiplier[slot] = f64::max(multiplier[slot], (got - want).abs() / scale);
        }
    }
    Ok(Delta0Defects { module, multiplier })
}

/// Everything the grid suite reports.
pub fn convalg_residuals(grid: usize, seed: u64, tol_exact: f64, tol_fd: f64) -> Result<Vec<Residual>> {
    let mut out = Vec::new();
    let haar = haar_invariance(1, 100_000, seed);
    out.push(Residual::new("haar_left_invariance", haar.left, 100_000, None, 1e-3));
    out.push(Residual::new("haar_right_invariance", haar.right, 100_000, None, 1e-3));

    // The quadrature checks run at `grid` and at 2·grid; the ratio is asserted only once the coarse
    // level is in the asymptotic range.
    let fine_grid = 2 * grid;
    let coarse = algebra_defects(grid, seed)?;
    let fine = algebra_defects(fine_grid, seed)?;
    let ratio = coarse.associativity / fine.associativity;
    let tol = quad_tol(&GridFunction::bc_axes(fine_grid, BC_HALF_WIDTH));
    out.push(Residual::new(
        format!("convolution_associativity_grid{fine_grid}"),
        fine.associativity,
        fine_grid,
        None,
        tol,
    ));
    if grid >= 16 {
        out.push(Residual::new(
            format!("convolution_associativity_ratio_grid{grid}_to_{fine_grid}"),
            (ratio - 4.0).abs(),
            fine_grid,
            None,
            1.0,
        ));
    }
    out.push(Residual::new(format!("star_involution_grid{fine_grid}"), fine.involution, fine_grid, None, tol));
    out.push(Residual::new(
        format!("star_anti_multiplicative_grid{fine_grid}"),
        fine.anti_multiplicativity,
        fine_grid,
        None,
        tol,
    ));
    out.push(Residual::new(
        "norm0_submultiplicative",
        fine.submultiplicativity,
        fine_grid,
        None,
        1.0 + SLACK,
    ));

    let mut rng = stream_rng(seed, 0x31);
    let mut worst_bound: f64 = 0.0;
    let mut worst_norm0: f64 = 0.0;
    for _ in 0..50 {
        let (f, sb) = random_boxed(&mut rng, grid)?;
        let e = pi_norm_check(&f, &sb)?;
        worst_bound = worst_bound.max(e.estimate / e.bound);
        worst_norm0 = worst_norm0.max(e.estimate / e.norm0);
    }
    out.push(Residual::new("pi_bound_random_boxes", worst_bound, 50, None, 1.0 + SLACK));
    out.push(Residual::new("pi_norm_below_norm0", worst_norm0, 50, None, 1.0 + 1e-9));
    let (ind, sb) = indicator_like(grid)?;
    let e = pi_norm_check(&ind, &sb)?;
    out.push(Residual::new("pi_bound_indicator", e.estimate / e.bound, 1, None, 1.0 + SLACK));

    let chi = chi_eps_experiment(&chi_test_function(grid)?, &[0.4, 0.2, 0.1, 0.05], grid)?;
    let over = chi.iter().map(|p| p.estimate / p.bound).fold(0.0, f64::max);
    let rises = chi.windows(2).filter(|w| w[1].estimate >= w[0].estimate).count();
    out.push(Residual::new("chi_eps_bound", over, chi.len(), None, 1.0 + SLACK));
    out.push(Residual::new("chi_eps_monotone_steps_violated", rises as f64, chi.len(), None, 0.0));
    out.push(Residual::new(
        "chi_eps_decay_last_over_first",
        chi[chi.len() - 1].estimate / chi[0].estimate,
        chi.len(),
        None,
        0.6,
    ));

    let (law, gen) = bisection_residuals(1, seed, 50, 1e-5)?;
    out.push(Residual::new("bisection_density_group_law", law, 50, None, tol_exact));
    out.push(Residual::new("bisection_density_generator", gen, 50, Some(1e-5), tol_fd));

    let d = delta0_defects(seed, 4, 24, 3.0)?;
    out.push(Residual::new("delta0_right_module", d.module, 4, None, 5e-4));
    out.push(Residual::new("delta0_multiplier_limit", d.multiplier[1], 4, None, 5e-3));
    out.push(Residual::new(
        "delta0_multiplier_refinement_ratio",
        (d.multiplier[0] / d.multiplier[1] - 4.0).abs(),
        4,
        None,
        1.0,
    ));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn haar_densities_are_invariant_and_swapping_them_fails() {
        for n in 1..=3 {
            let h = haar_invariance(n, 20_000, 5);
            assert!(h.left < 1e-6 && h.right < 1e-6, "{n}: {h:?}");
        }
        let h = HaarC::new(2);
        let bad = haar_invariance_with(2, 20_000, 5, &|c| h.right_density(c), &|c| h.left_density(c));
        assert!(bad.left > 1e-2 && bad.right > 1e-2, "{bad:?}");
        let c = CParam::new(2.0, DVector::from_vec(vec![0.3, -1.0])).unwrap();
        assert!((h.modular(&c) * j_c_of(&c) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn binary_and_csv_round_trip() {
        let axes = [Axis::new(0.0, 1.0, 3), Axis::new(-1.0, 1.0, 2), Axis::new(-2.0, 0.5, 4)];
        let f = GridFunction::from_fn(Chart::Gamma0, axes, |a, b, c| a + 10.0 * b - c * c).unwrap();
        let bytes = f.to_bytes();
        assert_eq!(bytes.len(), 8 * (HEADER_LEN + 24));
        assert_eq!(f64::from_le_bytes(bytes[0..8].try_into().unwrap()), 0.0);
        assert_eq!(GridFunction::from_bytes(&bytes).unwrap(), f);
        assert!(GridFunction::from_bytes(&bytes[..bytes.len() - 8]).is_err());
        let mut buf = Vec::new();
        f.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("log_t,x1,x2,value\n"));
        assert_eq!(text.lines().count(), 25);
    }

    #[test]
    fn zero_and_mismatch() {
        let axes = GridFunction::bc_axes(8, 2.0);
        let f = BumpFn::random(&mut stream_rng(1, 1), 1, 0.4, 0.2).grid(axes).unwrap();
        let z = GridFunction::zeros(Chart::BC, axes);
        assert_eq!(convolve(&f, &z).unwrap().sup(), 0.0);
        let other = GridFunction::zeros(Chart::BC, GridFunction::bc_axes(10, 2.0));
        assert!(convolve(&f, &other).is_err());
        let g0 = GridFunction::zeros(Chart::Gamma0, [Axis::new(0.0, 1.0, 4); 3]);
        assert!(density_bisection(&CParam::identity(1), &g0).is_err());
        let e = pi_norm_check(&g0, &SupportBox::of_grid(&g0)).unwrap();
        assert_eq!((e.estimate, e.bound), (0.0, 0.0));
    }

    #[test]
    fn gamma0_convolution_matches_direct_sum_and_is_associative() {
        let mut rng = stream_rng(3, 0);
        let (f1, _) = random_boxed(&mut rng, 6).unwrap();
        let ax = f1.axes;
        let f2 = GridFunction::from_fn(Chart::Gamma0, [ax[0], ax[2], Axis::new(0.0, 1.0, 5)], |u, a, b| {
            (-(u * u) - a * a).exp() * (1.0 + b)
        })
        .unwrap();
        let p = convolve(&f1, &f2).unwrap();
        // One output node by brute force.
        let (t, a, b) = (4, 2, 3);
        let tu = p.axes[0].point(t);
        let mut direct = 0.0;
        for i in 0..ax[0].len {
            if t < i || t - i >= ax[0].len {
                continue;
            }
            for j in 0..ax[2].len {
                let v = tu - ax[0].point(i);
                direct += f1.at(i, a, j)
                    * (-(v * v) - ax[2].point(j).powi(2)).exp()
                    * (1.0 + p.axes[2].point(b))
                    * ax[0].step()
                    * ax[2].step();
            }
        }
        assert!((p.at(t, a, b) - direct).abs() < 1e-12);
        let f3 = GridFunction::from_fn(Chart::Gamma0, [ax[0], Axis::new(0.0, 1.0, 5), Axis::new(0.0, 1.0, 3)], |u, a, b| u + a * b).unwrap();
        let l = convolve(&convolve(&f1, &f2).unwrap(), &f3).unwrap();
        let r = convolve(&f1, &convolve(&f2, &f3).unwrap()).unwrap();
        assert!(l.max_abs_diff(&r).unwrap() < 1e-12 * l.sup());
        let s = star(&star(&f1).unwrap()).unwrap();
        assert_eq!(s, f1);
        let anti = star(&convolve(&f1, &f2).unwrap()).unwrap();
        let rev = convolve(&star(&f2).unwrap(), &star(&f1).unwrap()).unwrap();
        assert!(anti.max_abs_diff(&rev).unwrap() < 1e-12 * anti.sup());
    }

    #[test]
    fn grid_convolution_agrees_with_pointwise_quadrature() {
        let mut rng = stream_rng(4, 0);
        let a = BumpFn::random(&mut rng, 1, 0.3, 0.2);
        let b = BumpFn::random(&mut rng, 1, 0.3, 0.2);
        let axes = GridFunction::bc_axes(32, BC_HALF_WIDTH);
        let p = convolve(&a.grid(axes).unwrap(), &b.grid(axes).unwrap()).unwrap();
        let q = CQuad::boxed(1, 2.5, 2.5, 96);
        let (i, j, k) = (5, 15, 17);
        let g = GroupoidPoint::new(b_of_theta(axes[0].point(i)), c_of(axes[1].point(j), axes[2].point(k)));
        let exact = convolve_at(&|x: &GroupoidPoint| a.eval(x), &|x: &GroupoidPoint| b.eval(x), &g, &q).unwrap();
        assert!((p.at(i, j, k) - exact).abs() < 0.03 * p.sup(), "{} vs {exact}", p.at(i, j, k));
    }

    #[test]
    fn convolution_delta_sequence_recovers_second_factor() {
        let mut rng = stream_rng(8, 0);
        let f2 = BumpFn::random(&mut rng, 1, 0.5, 0.2);
        let g = GroupoidPoint::new(b_of_theta(0.7), c_of(0.1, -0.2));
        let want = f2.eval(&g);
        let err = |sigma: f64| {
            let eta = move |x: &GroupoidPoint| {
                let u = x.c.s.ln();
                (-(u * u + x.c.y.norm_squared()) / (2.0 * sigma * sigma)).exp() / (2.0 * PI * sigma * sigma)
            };
            let q = CQuad::boxed(1, 6.0 * sigma, 6.0 * sigma, 32);
            (convolve_at(&eta, &|x: &GroupoidPoint| f2.eval(x), &g, &q).unwrap() - want).abs()
        };
        let (e1, e2) = (err(0.04), err(0.02));
        assert!(e2 < 2e-3 * want.abs() && (3.0..5.0).contains(&(e1 / e2)), "{e1} {e2}");
    }

    #[test]
    fn density_bisection_identity_and_grid_group_law() {
        let axes = GridFunction::bc_axes(24, BC_HALF_WIDTH);
        let f = BumpFn::random(&mut stream_rng(2, 2), 1, 0.4, 0.2).grid(axes).unwrap();
        let id = density_bisection(&CParam::identity(1), &f).unwrap();
        assert!(id.max_abs_diff(&f).unwrap() < 1e-12);
        let c0 = c_of(0.2, 0.1);
        let c1 = c_of(-0.1, 0.15);
        let two = density_bisection(&c0, &density_bisection(&c1, &f).unwrap()).unwrap();
        let one = density_bisection(&c_mul(&c0, &c1), &f).unwrap();
        assert!(rel(&two, &one).unwrap() < quad_tol(&axes));
    }

    #[test]
    fn pointwise_bisection_action() {
        for n in 1..=3 {
            let (law, gen) = bisection_residuals(n, 3, 10, 1e-5).unwrap();
            assert!(law < 1e-12 && gen < 1e-7, "{n}: {law} {gen}");
        }
    }

    #[test]
    fn lemma_bound_on_boxed_functions_and_monotonicity() {
        let mut rng = stream_rng(9, 9);
        for _ in 0..10 {
            let (f, sb) = random_boxed(&mut rng, 12).unwrap();
            let e = pi_norm_check(&f, &sb).unwrap();
            assert!(e.within_bound(), "{e:?}");
            assert!(e.estimate <= e.norm0 * (1.0 + 1e-9));
            let wider = SupportBox { r: (sb.r.0, sb.r.1 + 1.0), ..sb };
            assert!(wider.bound(1.0) >= sb.bound(1.0));
        }
        let (f, sb) = random_boxed(&mut rng, 8).unwrap();
        let small = SupportBox { m: (sb.m.0, sb.m.0 + 0.01), ..sb };
        assert!(pi_norm_check(&f, &small).is_err());
        let (ind, sb) = indicator_like(24).unwrap();
        let e = pi_norm_check(&ind, &sb).unwrap();
        assert!(e.within_bound() && e.estimate > 0.6 * e.bound, "{e:?}");
    }

    #[test]
    fn chi_eps_sequence_decreases() {
        let f = chi_test_function(16).unwrap();
        let pts = chi_eps_experiment(&f, &[0.4, 0.2, 0.1, 0.05], 16).unwrap();
        for w in pts.windows(2) {
            assert!(w[1].estimate < w[0].estimate);
            assert!((w[0].bound / w[1].bound - 2f64.sqrt()).abs() < 1e-12);
        }
        assert!(pts.iter().all(|p| p.estimate <= p.bound * (1.0 + SLACK)));
        // Vanishing near |x₁| = 1 gives zero for small ε.
        let g = GridFunction::from_fn(Chart::Gamma0, f.axes, |u, a, b| bump(2.0 * u - 1.0) * bump(a / 0.5) * bump(b)).unwrap();
        let p = chi_eps_experiment(&g, &[0.05], 8).unwrap();
        assert_eq!(p[0].estimate, 0.0);
    }
}
