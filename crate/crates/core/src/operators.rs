//! Dense states, Weyl operators, and the transform between the computational
//! basis and the characteristic function.
//!
//! Weyl operators are `w(p, q) = xi^(-pq) Z^p X^q` per site, with `xi = i`
//! for qubits and `xi = omega^((d+1)/2)` otherwise. Every phase that appears
//! is a power of `zeta = exp(i pi / d)`, so phases are tracked as exponents
//! modulo `2d` and only turned into floating point at the end.
//!
//! `w(p, q)` is monomial: `w(p, q)|j> = zeta^e |j + q>` with
//! `e = -xi_exp * (p . q) + 2 p . (j + q)`. Both directions of the
//! characteristic-function transform therefore reduce, for each shift `q`,
//! to a separable `n`-dimensional DFT over `Z_d^n`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::phase_space::{Dims, PhasePoint};

pub type CMatrix = DMatrix<Complex64>;

/// Default cap on the dimension of dense joint systems (`d^(2n)` or `2^(3n)`).
pub const DEFAULT_SIZE_CAP: usize = 1 << 14;

/// Environment variable overriding [`DEFAULT_SIZE_CAP`].
pub const SIZE_CAP_ENV: &str = "MAGICFLOW_SIZE_CAP";

pub const HERMITIAN_TOL: f64 = 1e-10;
pub const TRACE_TOL: f64 = 1e-10;
pub const PSD_TOL: f64 = 1e-9;

pub fn size_cap() -> usize {
    std::env::var(SIZE_CAP_ENV)
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .unwrap_or(DEFAULT_SIZE_CAP)
}

pub fn check_size_cap(dim: usize) -> Result<()> {
    let cap = size_cap();
    if dim > cap {
        return Err(Error::SizeCapExceeded { dim, cap });
    }
    Ok(())
}

/// Exponent `e` with `xi = zeta^e`.
pub fn xi_exponent(d: u32) -> u32 {
    if d == 2 {
        1
    } else {
        d + 1
    }
}

/// Powers of `zeta = exp(i pi / d)`.
#[derive(Clone, Debug)]
pub struct Roots {
    d: u32,
    table: Vec<Complex64>,
}

impl Roots {
    pub fn new(d: u32) -> Self {
        let m = 2 * d;
        let table = (0..m)
            .map(|k| Complex64::from_polar(1.0, std::f64::consts::PI * k as f64 / d as f64))
            .collect();
        Roots { d, table }
    }

    pub fn modulus(&self) -> u32 {
        2 * self.d
    }

    /// `zeta^e` for any integer exponent.
    pub fn zeta(&self, e: i64) -> Complex64 {
        let m = self.modulus() as i64;
        self.table[e.rem_euclid(m) as usize]
    }

    /// `omega^k = zeta^(2k)`.
    pub fn omega(&self, k: i64) -> Complex64 {
        self.zeta(2 * k)
    }

    /// Exponent `e` with `zeta^e == z`, if `z` is within `tol` of a power of `zeta`.
    pub fn exponent_of(&self, z: Complex64, tol: f64) -> Option<u32> {
        self.table
            .iter()
            .position(|r| (r - z).norm() < tol)
            .map(|e| e as u32)
    }
}

/// Applies `w(x)` to a basis index: returns `(target index, zeta exponent)`.
pub fn weyl_action(dims: Dims, x: &PhasePoint, j: usize) -> (usize, u32) {
    let d = dims.d;
    let m = 2 * d as u64;
    let digits = dims.digits(j);
    let mut target = 0usize;
    let mut dot = 0u64;
    for ((&j_i, &q_i), &p_i) in digits.iter().zip(&x.q).zip(&x.p) {
        let t = (j_i + q_i) % d;
        dot += p_i as u64 * t as u64;
        target = target * d as usize + t as usize;
    }
    let xi = xi_exponent(d) as u64;
    let e = (m * m - (xi * (x.pq_dot() % m)) % m + 2 * (dot % m)) % m;
    (target, e as u32)
}

/// Dense `w(x)`.
pub fn weyl_matrix(dims: Dims, x: &PhasePoint) -> Result<CMatrix> {
    dims.check_point(x)?;
    let dim = dims.hilbert_dim();
    let roots = Roots::new(dims.d);
    let mut m = CMatrix::zeros(dim, dim);
    for j in 0..dim {
        let (t, e) = weyl_action(dims, x, j);
        m[(t, j)] = roots.zeta(e as i64);
    }
    Ok(m)
}

/// In-place `out[k] = sum_t buf[t] * omega^(t . k)` over `Z_d^n`, one axis at a time.
fn dft_forward(buf: &mut [Complex64], dims: Dims, roots: &Roots) {
    let d = dims.d as usize;
    let dim = buf.len();
    let mut line = vec![Complex64::new(0.0, 0.0); d];
    let mut stride = 1usize;
    for _axis in 0..dims.n {
        let block = stride * d;
        for start in (0..dim).step_by(block) {
            for off in 0..stride {
                let base = start + off;
                for (t, slot) in line.iter_mut().enumerate() {
                    *slot = buf[base + t * stride];
                }
                for k in 0..d {
                    let mut acc = Complex64::new(0.0, 0.0);
                    for (t, v) in line.iter().enumerate() {
                        acc += v * roots.omega((t * k % d) as i64);
                    }
                    buf[base + k * stride] = acc;
                }
            }
        }
        stride = block;
    }
}

/// Index of `a - b` digitwise.
fn sub_index(dims: Dims, a: &[u32], b: &[u32]) -> usize {
    let d = dims.d;
    a.iter()
        .zip(b)
        .fold(0usize, |acc, (&x, &y)| acc * d as usize + ((x + d - y) % d) as usize)
}

fn pq_phase_exp(d: u32, p: &[u32], q: &[u32]) -> i64 {
    let dot: u64 = p.iter().zip(q).map(|(&a, &b)| a as u64 * b as u64).sum();
    -((xi_exponent(d) as u64 * (dot % (2 * d as u64))) as i64)
}

/// A state on `n` qudits as a dense `d^n x d^n` matrix.
#[derive(Clone, Debug)]
pub struct DensityOperator {
    dims: Dims,
    matrix: CMatrix,
}

impl DensityOperator {
    /// Validates Hermiticity, unit trace and positivity.
    pub fn new(dims: Dims, matrix: CMatrix) -> Result<Self> {
        let rho = Self::from_matrix_unchecked(dims, matrix)?;
        rho.validate()?;
        Ok(rho)
    }

    /// Only checks the shape.
    pub fn from_matrix_unchecked(dims: Dims, matrix: CMatrix) -> Result<Self> {
        let dim = dims.hilbert_dim();
        if matrix.nrows() != dim || matrix.ncols() != dim {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} matrix for Hilbert dimension {dim}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        Ok(DensityOperator { dims, matrix })
    }

    pub fn validate(&self) -> Result<()> {
        let m = &self.matrix;
        if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidState("non-finite entry".into()));
        }
        let herm = max_abs_diff(m, &m.adjoint());
        if herm > HERMITIAN_TOL {
            return Err(Error::InvalidState(format!(
                "not Hermitian (max deviation {herm:e})"
            )));
        }
        let tr = m.trace();
        if (tr - Complex64::new(1.0, 0.0)).norm() > TRACE_TOL {
            return Err(Error::InvalidState(format!("trace {tr} != 1")));
        }
        let min = hermitian_eigenvalues(m)
            .into_iter()
            .fold(f64::INFINITY, f64::min);
        if min < -PSD_TOL {
            return Err(Error::InvalidState(format!(
                "not positive semidefinite (min eigenvalue {min:e})"
            )));
        }
        Ok(())
    }

    /// `|psi><psi|` from amplitudes, normalized.
    pub fn from_pure(dims: Dims, amplitudes: &[Complex64]) -> Result<Self> {
        let dim = dims.hilbert_dim();
        if amplitudes.len() != dim {
            return Err(Error::DimensionMismatch(format!(
                "{} amplitudes for dimension {dim}",
                amplitudes.len()
            )));
        }
        let norm = amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(Error::InvalidState("zero or non-finite state vector".into()));
        }
        let v: Vec<Complex64> = amplitudes.iter().map(|a| a / norm).collect();
        let matrix = CMatrix::from_fn(dim, dim, |i, j| v[i] * v[j].conj());
        Ok(DensityOperator { dims, matrix })
    }

    pub fn basis_state(dims: Dims, index: usize) -> Self {
        let dim = dims.hilbert_dim();
        let mut matrix = CMatrix::zeros(dim, dim);
        matrix[(index, index)] = Complex64::new(1.0, 0.0);
        DensityOperator { dims, matrix }
    }

    pub fn maximally_mixed(dims: Dims) -> Self {
        let dim = dims.hilbert_dim();
        DensityOperator {
            dims,
            matrix: CMatrix::identity(dim, dim) / Complex64::new(dim as f64, 0.0),
        }
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    /// `Tr[rho^2]`.
    pub fn purity(&self) -> f64 {
        self.matrix.iter().map(|z| z.norm_sqr()).sum()
    }

    /// `rho (x) sigma` with `self` on the leading sites.
    pub fn tensor(&self, other: &DensityOperator) -> Result<Self> {
        if self.dims.d != other.dims.d {
            return Err(Error::DimensionMismatch("tensor of different d".into()));
        }
        let dims = Dims::new(self.dims.n + other.dims.n, self.dims.d)?;
        Ok(DensityOperator {
            dims,
            matrix: self.matrix.kronecker(&other.matrix),
        })
    }

    pub fn max_abs_diff(&self, other: &DensityOperator) -> f64 {
        max_abs_diff(&self.matrix, &other.matrix)
    }
}

pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

/// Eigenvalues of the Hermitian part of `m`.
pub fn hermitian_eigenvalues(m: &CMatrix) -> Vec<f64> {
    let h = (m + m.adjoint()) * Complex64::new(0.5, 0.0);
    h.symmetric_eigenvalues().iter().copied().collect()
}

/// Values of `Xi(x) = Tr[rho w(-x)]` over all of `V^n`.
#[derive(Clone, Debug, PartialEq)]
pub struct CharFunction {
    dims: Dims,
    values: Vec<Complex64>,
}

impl CharFunction {
    /// Validates normalization, the modulus bound and conjugate symmetry.
    pub fn new(dims: Dims, values: Vec<Complex64>) -> Result<Self> {
        let xi = Self::from_values_unchecked(dims, values)?;
        xi.validate()?;
        Ok(xi)
    }

    pub fn from_values_unchecked(dims: Dims, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != dims.num_points() {
            return Err(Error::DimensionMismatch(format!(
                "{} table entries for {} phase points",
                values.len(),
                dims.num_points()
            )));
        }
        Ok(CharFunction { dims, values })
    }

    pub fn validate(&self) -> Result<()> {
        if self.values.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidCharFunction("non-finite entry".into()));
        }
        let at_zero = self.values[0];
        if (at_zero - Complex64::new(1.0, 0.0)).norm() > TRACE_TOL {
            return Err(Error::InvalidCharFunction(format!(
                "value at zero is {at_zero}, expected 1"
            )));
        }
        if let Some(v) = self.values.iter().find(|z| z.norm() > 1.0 + 1e-10) {
            return Err(Error::InvalidCharFunction(format!("|{v}| exceeds 1")));
        }
        for (i, v) in self.values.iter().enumerate() {
            let neg = self.dims.point_index(&self.dims.point_at(i).neg());
            if (self.values[neg] - v.conj()).norm() > 1e-10 {
                return Err(Error::InvalidCharFunction(format!(
                    "conjugate symmetry fails at index {i}"
                )));
            }
        }
        Ok(())
    }

    /// Table with 1 at the origin and 0 elsewhere (the maximally mixed state).
    pub fn delta(dims: Dims) -> Self {
        let mut values = vec![Complex64::new(0.0, 0.0); dims.num_points()];
        values[0] = Complex64::new(1.0, 0.0);
        CharFunction { dims, values }
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn at(&self, x: &PhasePoint) -> Complex64 {
        self.values[self.dims.point_index(x)]
    }

    pub fn max_abs_diff(&self, other: &CharFunction) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// `(1/d^n) sum |Xi|^2`, which equals `Tr[rho^2]`.
    pub fn purity(&self) -> f64 {
        self.values.iter().map(|z| z.norm_sqr()).sum::<f64>() / self.dims.hilbert_dim() as f64
    }
}

/// `Xi_rho(x) = Tr[rho w(-x)]` for every `x`. Validates the input state.
pub fn char_function(rho: &DensityOperator) -> Result<CharFunction> {
    rho.validate()?;
    Ok(char_function_unchecked(rho))
}

/// The transform without validating `rho`.
pub fn char_function_unchecked(rho: &DensityOperator) -> CharFunction {
    let dims = rho.dims;
    let dim = dims.hilbert_dim();
    let roots = Roots::new(dims.d);
    let m = &rho.matrix;
    // For the shift y_q: Xi(-(p', q')) = zeta^(-xi (p'.q')) sum_t rho[t - q', t] omega^(p'.t)
    let columns: Vec<Vec<Complex64>> = (0..dim)
        .into_par_iter()
        .map(|qi| {
            let q = dims.digits(qi);
            let mut buf: Vec<Complex64> = (0..dim)
                .map(|t| {
                    let src = sub_index(dims, &dims.digits(t), &q);
                    m[(src, t)]
                })
                .collect();
            dft_forward(&mut buf, dims, &roots);
            for (pi, v) in buf.iter_mut().enumerate() {
                *v *= roots.zeta(pq_phase_exp(dims.d, &dims.digits(pi), &q));
            }
            buf
        })
        .collect();
    let mut values = vec![Complex64::new(0.0, 0.0); dims.num_points()];
    for (qi, col) in columns.into_iter().enumerate() {
        for (pi, v) in col.into_iter().enumerate() {
            let y = PhasePoint {
                d: dims.d,
                p: dims.digits(pi),
                q: dims.digits(qi),
            };
            values[dims.point_index(&y.neg())] = v;
        }
    }
    CharFunction { dims, values }
}

/// `rho = (1/d^n) sum_x Xi(x) w(x)`. The result is not validated.
pub fn inverse_char(xi: &CharFunction) -> DensityOperator {
    let dims = xi.dims;
    let dim = dims.hilbert_dim();
    let roots = Roots::new(dims.d);
    let scale = 1.0 / dim as f64;
    // For shift q: rho[k, k - q] = (1/D) sum_p Xi(p, q) zeta^(-xi p.q) omega^(p.k)
    let columns: Vec<Vec<Complex64>> = (0..dim)
        .into_par_iter()
        .map(|qi| {
            let q = dims.digits(qi);
            let mut buf: Vec<Complex64> = (0..dim)
                .map(|pi| {
                    let v = xi.values[pi * dim + qi];
                    v * roots.zeta(pq_phase_exp(dims.d, &dims.digits(pi), &q))
                })
                .collect();
            dft_forward(&mut buf, dims, &roots);
            buf
        })
        .collect();
    let mut matrix = CMatrix::zeros(dim, dim);
    for (qi, col) in columns.into_iter().enumerate() {
        let q = dims.digits(qi);
        for (k, v) in col.into_iter().enumerate() {
            let j = sub_index(dims, &dims.digits(k), &q);
            matrix[(k, j)] = v * scale;
        }
    }
    DensityOperator { dims, matrix }
}

/// `-sum lambda ln lambda`, clamping eigenvalues in `[-1e-9, 0]` to zero.
pub fn von_neumann_entropy(rho: &DensityOperator) -> Result<f64> {
    entropy_of_matrix(&rho.matrix)
}

pub(crate) fn entropy_of_matrix(m: &CMatrix) -> Result<f64> {
    let mut s = 0.0;
    for lambda in hermitian_eigenvalues(m) {
        if lambda < -PSD_TOL {
            return Err(Error::NegativeEigenvalue(lambda));
        }
        if lambda > 0.0 {
            s -= lambda * lambda.ln();
        }
    }
    Ok(s.max(0.0))
}

/// `(1/2) sum |eig(rho - sigma)|`.
pub fn trace_distance(rho: &DensityOperator, sigma: &DensityOperator) -> Result<f64> {
    if rho.dims != sigma.dims {
        return Err(Error::DimensionMismatch(format!(
            "trace distance between {:?} and {:?}",
            rho.dims, sigma.dims
        )));
    }
    Ok(half_trace_norm(&(&rho.matrix - &sigma.matrix)))
}

pub(crate) fn half_trace_norm(m: &CMatrix) -> f64 {
    0.5 * hermitian_eigenvalues(m).iter().map(|l| l.abs()).sum::<f64>()
}

/// Offsets of the local basis states on `sites`, plus the base indices of the rest.
fn local_layout(dims: Dims, sites: &[usize]) -> (Vec<usize>, Vec<usize>) {
    let d = dims.d as usize;
    let dim = dims.hilbert_dim();
    let weight = |site: usize| d.pow((dims.n - 1 - site) as u32);
    let local = d.pow(sites.len() as u32);
    let offsets = (0..local)
        .map(|l| {
            let mut rem = l;
            let mut off = 0;
            for &s in sites.iter().rev() {
                off += (rem % d) * weight(s);
                rem /= d;
            }
            off
        })
        .collect();
    let bases = (0..dim)
        .filter(|&i| {
            let digits = dims.digits(i);
            sites.iter().all(|&s| digits[s] == 0)
        })
        .collect();
    (offsets, bases)
}

/// `v <- (op on sites) v`, where `op` acts on `sites` in the listed order.
pub fn apply_local_to_vector(dims: Dims, v: &mut [Complex64], op: &CMatrix, sites: &[usize]) {
    let (offsets, bases) = local_layout(dims, sites);
    let mut scratch = vec![Complex64::new(0.0, 0.0); offsets.len()];
    for &b in &bases {
        for (r, slot) in scratch.iter_mut().enumerate() {
            *slot = offsets
                .iter()
                .enumerate()
                .map(|(c, off)| op[(r, c)] * v[b + off])
                .sum();
        }
        for (off, val) in offsets.iter().zip(&scratch) {
            v[b + off] = *val;
        }
    }
}

/// `U A U^dagger` for a local unitary `U = op` on `sites`.
pub fn conjugate_local(dims: Dims, a: &CMatrix, op: &CMatrix, sites: &[usize]) -> CMatrix {
    let left = |m: &CMatrix| {
        let mut out = m.clone();
        for mut col in out.column_iter_mut() {
            apply_local_to_vector(dims, col.as_mut_slice(), op, sites);
        }
        out
    };
    let ga = left(a);
    left(&ga.adjoint()).adjoint()
}

/// A phased Weyl operator `zeta^phase * w(point)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PauliTerm {
    /// Exponent of `zeta = exp(i pi / d)`, reduced mod `2d`.
    pub phase: u32,
    pub point: PhasePoint,
}

impl PauliTerm {
    pub fn new(phase: u32, point: PhasePoint) -> Self {
        let m = 2 * point.d;
        PauliTerm {
            phase: phase % m,
            point,
        }
    }

    pub fn identity(dims: Dims) -> Self {
        PauliTerm {
            phase: 0,
            point: PhasePoint::zero(dims),
        }
    }

    pub fn coefficient(&self) -> Complex64 {
        Roots::new(self.point.d).zeta(self.phase as i64)
    }

    /// `self * other`, using `w(x) w(y) = zeta^e w(x + y)` sitewise.
    pub fn mul(&self, other: &PauliTerm) -> PauliTerm {
        let x = &self.point;
        let y = &other.point;
        assert_eq!(x.dims(), y.dims(), "PauliTerm product shape mismatch");
        let d = x.d as i64;
        let m = 2 * d;
        let xi = xi_exponent(x.d) as i64;
        let mut e = self.phase as i64 + other.phase as i64;
        for i in 0..x.n() {
            let (p1, q1) = (x.p[i] as i64, x.q[i] as i64);
            let (p2, q2) = (y.p[i] as i64, y.q[i] as i64);
            let (pp, qq) = ((p1 + p2) % d, (q1 + q2) % d);
            e += xi * (pp * qq - p1 * q1 - p2 * q2) - 2 * q1 * p2;
        }
        PauliTerm {
            phase: e.rem_euclid(m) as u32,
            point: x.add(y),
        }
    }

    pub fn pow(&self, k: u32) -> PauliTerm {
        let mut acc = PauliTerm::identity(self.point.dims());
        for _ in 0..k {
            acc = acc.mul(self);
        }
        acc
    }

    pub fn to_matrix(&self) -> CMatrix {
        let dims = self.point.dims();
        weyl_matrix(dims, &self.point).expect("point shape matches its own dims") * self.coefficient()
    }
}
