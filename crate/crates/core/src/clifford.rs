//! Clifford circuits as words over the generators FOURIER, PHASE, MULT(a),
//! SUM and WEYL(x).
//!
//! Gate conventions (single site unless noted):
//!
//! | gate    | action on basis                  | conjugation of `w(p, q)`         |
//! |---------|----------------------------------|----------------------------------|
//! | FOURIER | `|j> -> d^-1/2 sum_k omega^jk |k>`| `(p, q) -> (q, -p)`              |
//! | PHASE   | `|j> -> xi^(j^2) |j>`            | `(p, q) -> (p + q, q)`           |
//! | MULT(a) | `|j> -> |a j>`                   | `(p, q) -> (p / a, a q)`         |
//! | SUM     | `|c, t> -> |c, t + c>`           | `p_c -= p_t`, `q_t += q_c`       |
//! | WEYL(y) | `w(y)` on all sites              | label fixed, phase `omega^<y,x>` |
//!
//! For qubits FOURIER, PHASE and SUM are H, S and CNOT. Conjugation phases
//! are not tabulated; they are read off the local matrices, so the table
//! above is the only convention that has to be right.

use std::collections::HashMap;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::operators::{
    self, apply_local_to_vector, conjugate_local, max_abs_diff, weyl_matrix, CMatrix,
    DensityOperator, PauliTerm, Roots,
};
use crate::phase_space::{mod_inv, symplectic_unchecked, Dims, IsotropicSubgroup, PhasePoint};

/// A generator type.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum GateKind {
    Fourier,
    Phase,
    Mult(u32),
    Sum,
    Weyl(PhasePoint),
}

/// One generator application. `Sum` targets are `[control, target]`;
/// `Weyl` acts on every site and carries no targets.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Gate {
    pub kind: GateKind,
    pub targets: Vec<usize>,
}

impl Gate {
    pub fn fourier(site: usize) -> Self {
        Gate {
            kind: GateKind::Fourier,
            targets: vec![site],
        }
    }

    pub fn phase(site: usize) -> Self {
        Gate {
            kind: GateKind::Phase,
            targets: vec![site],
        }
    }

    pub fn mult(site: usize, a: u32) -> Self {
        Gate {
            kind: GateKind::Mult(a),
            targets: vec![site],
        }
    }

    pub fn sum(control: usize, target: usize) -> Self {
        Gate {
            kind: GateKind::Sum,
            targets: vec![control, target],
        }
    }

    pub fn weyl(x: PhasePoint) -> Self {
        Gate {
            kind: GateKind::Weyl(x),
            targets: Vec::new(),
        }
    }

    fn check(&self, dims: Dims) -> Result<()> {
        let expected = match &self.kind {
            GateKind::Fourier | GateKind::Phase | GateKind::Mult(_) => 1,
            GateKind::Sum => 2,
            GateKind::Weyl(x) => {
                dims.check_point(x)?;
                0
            }
        };
        if self.targets.len() != expected {
            return Err(Error::Format(format!(
                "{:?} expects {expected} target(s), got {}",
                self.kind,
                self.targets.len()
            )));
        }
        if let Some(&site) = self.targets.iter().find(|&&s| s >= dims.n) {
            return Err(Error::SiteOutOfRange { site, n: dims.n });
        }
        if self.kind == GateKind::Sum && self.targets[0] == self.targets[1] {
            return Err(Error::Format("SUM control and target coincide".into()));
        }
        if let GateKind::Mult(a) = self.kind {
            if a >= dims.d || mod_inv(a, dims.d).is_none() {
                return Err(Error::NonInvertibleMultiplier { a, d: dims.d });
            }
        }
        Ok(())
    }

    /// Sites the local matrix acts on, in its tensor order.
    fn sites(&self, dims: Dims) -> Vec<usize> {
        match self.kind {
            GateKind::Weyl(_) => (0..dims.n).collect(),
            _ => self.targets.clone(),
        }
    }

    /// Image of a phased Weyl operator under conjugation by this gate.
    fn conjugate(&self, dims: Dims, term: &PauliTerm, cache: &mut LocalCache) -> Result<PauliTerm> {
        let d = dims.d;
        let x = &term.point;
        let mut image = x.clone();
        match &self.kind {
            GateKind::Weyl(y) => {
                let c = symplectic_unchecked(y, x);
                return Ok(PauliTerm::new(term.phase + 2 * c, image));
            }
            GateKind::Fourier => {
                let s = self.targets[0];
                image.p[s] = x.q[s];
                image.q[s] = (d - x.p[s]) % d;
            }
            GateKind::Phase => {
                let s = self.targets[0];
                image.p[s] = (x.p[s] + x.q[s]) % d;
            }
            GateKind::Mult(a) => {
                let s = self.targets[0];
                let inv = mod_inv(*a, d).ok_or(Error::NonInvertibleMultiplier { a: *a, d })?;
                image.p[s] = (x.p[s] as u64 * inv as u64 % d as u64) as u32;
                image.q[s] = (x.q[s] as u64 * *a as u64 % d as u64) as u32;
            }
            GateKind::Sum => {
                let (c, t) = (self.targets[0], self.targets[1]);
                image.p[c] = (x.p[c] + d - x.p[t]) % d;
                image.q[t] = (x.q[t] + x.q[c]) % d;
            }
        }
        let sites = self.sites(dims);
        let local = |pt: &PhasePoint| PhasePoint {
            d,
            p: sites.iter().map(|&s| pt.p[s]).collect(),
            q: sites.iter().map(|&s| pt.q[s]).collect(),
        };
        let extra = cache.phase(&self.kind, local(x), local(&image))?;
        Ok(PauliTerm::new(term.phase + extra, image))
    }
}

/// Conjugation phases of local gates, computed from the dense local matrices.
#[derive(Default)]
struct LocalCache {
    phases: HashMap<(GateKind, PhasePoint, PhasePoint), u32>,
}

impl LocalCache {
    fn phase(&mut self, kind: &GateKind, from: PhasePoint, to: PhasePoint) -> Result<u32> {
        let key = (kind.clone(), from, to);
        if let Some(&e) = self.phases.get(&key) {
            return Ok(e);
        }
        let (kind, from, to) = &key;
        let d = from.d;
        let local_dims = Dims::new(from.n(), d)?;
        let g = gate_matrix(kind, d)?;
        let conj = &g * weyl_matrix(local_dims, from)? * g.adjoint();
        let c = (weyl_matrix(local_dims, to)?.adjoint() * conj).trace()
            / local_dims.hilbert_dim() as f64;
        let e = Roots::new(d).exponent_of(c, 1e-9).ok_or_else(|| {
            Error::InvalidPhase(format!("{kind:?} maps {from:?} off the Weyl group ({c})"))
        })?;
        self.phases.insert(key, e);
        Ok(e)
    }
}

/// Dense matrix of a generator on its own sites (two sites for SUM, in
/// `control (x) target` order; all sites of the point for WEYL).
pub fn gate_matrix(kind: &GateKind, d: u32) -> Result<CMatrix> {
    Dims::new(1, d)?;
    let du = d as usize;
    let roots = Roots::new(d);
    let zero = Complex64::new(0.0, 0.0);
    Ok(match kind {
        GateKind::Fourier => {
            let s = 1.0 / (d as f64).sqrt();
            CMatrix::from_fn(du, du, |k, j| roots.omega((j * k) as i64) * s)
        }
        GateKind::Phase => {
            let xi = operators::xi_exponent(d) as i64;
            CMatrix::from_fn(du, du, |i, j| {
                if i == j {
                    roots.zeta(xi * (j * j) as i64)
                } else {
                    zero
                }
            })
        }
        GateKind::Mult(a) => {
            if *a >= d || mod_inv(*a, d).is_none() {
                return Err(Error::NonInvertibleMultiplier { a: *a, d });
            }
            let a = *a as usize;
            CMatrix::from_fn(du, du, |i, j| {
                if i == a * j % du {
                    Complex64::new(1.0, 0.0)
                } else {
                    zero
                }
            })
        }
        GateKind::Sum => {
            let n = du * du;
            CMatrix::from_fn(n, n, |row, col| {
                let (c, t) = (col / du, col % du);
                if row == c * du + (t + c) % du {
                    Complex64::new(1.0, 0.0)
                } else {
                    zero
                }
            })
        }
        GateKind::Weyl(x) => {
            if x.d != d {
                return Err(Error::DimensionMismatch("WEYL point has a different d".into()));
            }
            weyl_matrix(x.dims(), x)?
        }
    })
}

fn check_unitary(u: &CMatrix) -> Result<()> {
    if u.nrows() != u.ncols() {
        return Err(Error::NonUnitary(f64::INFINITY));
    }
    let dev = max_abs_diff(&(u.adjoint() * u), &CMatrix::identity(u.nrows(), u.ncols()));
    if dev > 1e-10 {
        return Err(Error::NonUnitary(dev));
    }
    Ok(())
}

/// Finds `(c, y)` with `a = c w(y)` to `1e-8`, if `a` is a scaled Weyl operator.
pub fn match_weyl(dims: Dims, a: &CMatrix) -> Option<(Complex64, PhasePoint)> {
    let dim = dims.hilbert_dim();
    // w(y)|0> is proportional to |q_y>
    let (row, _) = (0..dim)
        .map(|r| (r, a[(r, 0)].norm()))
        .fold((0, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
    let q = dims.digits(row);
    let h = dim;
    let mut best: Option<(Complex64, PhasePoint)> = None;
    for pi in 0..h {
        let y = PhasePoint {
            d: dims.d,
            p: dims.digits(pi),
            q: q.clone(),
        };
        // <w(y), a> = Tr[w(y)^dagger a] / D, using the monomial structure of w(y)
        let mut acc = Complex64::new(0.0, 0.0);
        let roots = Roots::new(dims.d);
        for j in 0..dim {
            let (t, e) = operators::weyl_action(dims, &y, j);
            acc += roots.zeta(e as i64).conj() * a[(t, j)];
        }
        let c = acc / dim as f64;
        if best.as_ref().is_none_or(|(b, _)| c.norm() > b.norm()) {
            best = Some((c, y));
        }
    }
    let (c, y) = best?;
    if (c.norm() - 1.0).abs() > 1e-8 {
        return None;
    }
    let w = weyl_matrix(dims, &y).ok()? * c;
    (max_abs_diff(&w, a) <= 1e-8).then_some((c, y))
}

/// Whether `u` maps every Weyl generator `Z_i`, `X_i` to a scaled Weyl operator.
pub fn is_clifford(dims: Dims, u: &CMatrix) -> Result<bool> {
    if u.nrows() != dims.hilbert_dim() {
        return Err(Error::DimensionMismatch(format!(
            "{}x{} unitary for dimension {}",
            u.nrows(),
            u.ncols(),
            dims.hilbert_dim()
        )));
    }
    check_unitary(u)?;
    for site in 0..dims.n {
        for x in [PhasePoint::z_at(dims, site), PhasePoint::x_at(dims, site)] {
            let img = u * weyl_matrix(dims, &x)? * u.adjoint();
            if match_weyl(dims, &img).is_none() {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// An ordered word of generator gates; the first gate acts first.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CliffordCircuit {
    pub dims: Dims,
    pub gates: Vec<Gate>,
}

impl CliffordCircuit {
    pub fn new(dims: Dims, gates: Vec<Gate>) -> Result<Self> {
        for g in &gates {
            g.check(dims)?;
        }
        Ok(CliffordCircuit { dims, gates })
    }

    pub fn identity(dims: Dims) -> Self {
        CliffordCircuit {
            dims,
            gates: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.gates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gates.is_empty()
    }

    /// `other` after `self`.
    pub fn then(&self, other: &CliffordCircuit) -> Result<Self> {
        if self.dims != other.dims {
            return Err(Error::DimensionMismatch("composing circuits of different shape".into()));
        }
        let mut gates = self.gates.clone();
        gates.extend(other.gates.iter().cloned());
        Ok(CliffordCircuit {
            dims: self.dims,
            gates,
        })
    }

    /// Dense unitary. Desk scale only.
    pub fn unitary(&self) -> Result<CMatrix> {
        let dim = self.dims.hilbert_dim();
        let mut u = CMatrix::identity(dim, dim);
        for g in &self.gates {
            let op = gate_matrix(&g.kind, self.dims.d)?;
            let sites = g.sites(self.dims);
            for mut col in u.column_iter_mut() {
                apply_local_to_vector(self.dims, col.as_mut_slice(), &op, &sites);
            }
        }
        Ok(u)
    }

    pub fn apply_to_vector(&self, amplitudes: &mut [Complex64]) -> Result<()> {
        if amplitudes.len() != self.dims.hilbert_dim() {
            return Err(Error::DimensionMismatch(format!(
                "{} amplitudes for dimension {}",
                amplitudes.len(),
                self.dims.hilbert_dim()
            )));
        }
        for g in &self.gates {
            let op = gate_matrix(&g.kind, self.dims.d)?;
            apply_local_to_vector(self.dims, amplitudes, &op, &g.sites(self.dims));
        }
        Ok(())
    }

    /// `U P U^dagger` for a phased Weyl operator `P`.
    pub fn conjugate_term(&self, term: &PauliTerm) -> Result<PauliTerm> {
        self.dims.check_point(&term.point)?;
        let mut cache = LocalCache::default();
        let mut t = term.clone();
        for g in &self.gates {
            t = g.conjugate(self.dims, &t, &mut cache)?;
        }
        Ok(t)
    }
}

/// `U rho U^dagger`.
pub fn apply(circuit: &CliffordCircuit, rho: &DensityOperator) -> Result<DensityOperator> {
    if circuit.dims != rho.dims() {
        return Err(Error::DimensionMismatch(format!(
            "circuit over {:?} applied to state over {:?}",
            circuit.dims,
            rho.dims()
        )));
    }
    let mut m = rho.matrix().clone();
    for g in &circuit.gates {
        let op = gate_matrix(&g.kind, circuit.dims.d)?;
        m = conjugate_local(circuit.dims, &m, &op, &g.sites(circuit.dims));
    }
    DensityOperator::from_matrix_unchecked(circuit.dims, m)
}

/// `U |0...0>` as a pure state vector.
pub fn prepare_stabilizer_vector(circuit: &CliffordCircuit) -> Result<Vec<Complex64>> {
    let mut v = vec![Complex64::new(0.0, 0.0); circuit.dims.hilbert_dim()];
    v[0] = Complex64::new(1.0, 0.0);
    circuit.apply_to_vector(&mut v)?;
    Ok(v)
}

/// `U |0><0|^n U^dagger`.
pub fn prepare_stabilizer(circuit: &CliffordCircuit) -> Result<DensityOperator> {
    DensityOperator::from_pure(circuit.dims, &prepare_stabilizer_vector(circuit)?)
}

/// Random generator word of `depth` gates, a deterministic function of `seed`.
pub fn random_clifford(dims: Dims, depth: usize, seed: u64) -> Result<CliffordCircuit> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_clifford_with(dims, depth, &mut rng)
}

pub fn random_clifford_with<R: Rng + ?Sized>(
    dims: Dims,
    depth: usize,
    rng: &mut R,
) -> Result<CliffordCircuit> {
    if depth == 0 {
        return Err(Error::Format("random Clifford depth must be at least 1".into()));
    }
    let d = dims.d;
    let mut kinds = vec![0u8, 1, 4];
    if d > 2 {
        kinds.push(2);
    }
    if dims.n > 1 {
        kinds.push(3);
    }
    let gates = (0..depth)
        .map(|_| {
            let site = rng.random_range(0..dims.n);
            match kinds[rng.random_range(0..kinds.len())] {
                0 => Gate::fourier(site),
                1 => Gate::phase(site),
                2 => Gate::mult(site, rng.random_range(2..d)),
                3 => {
                    let mut other = rng.random_range(0..dims.n - 1);
                    if other >= site {
                        other += 1;
                    }
                    Gate::sum(site, other)
                }
                _ => Gate::weyl(dims.point_at(rng.random_range(0..dims.num_points()))),
            }
        })
        .collect();
    CliffordCircuit::new(dims, gates)
}

/// `|0><0|^(n-k) (x) (I/d)^k`, the canonical mean state of class `k`.
pub fn canonical_mean_state(dims: Dims, k: usize) -> Result<DensityOperator> {
    if k > dims.n {
        return Err(Error::Unsupported(format!("class {k} exceeds n = {}", dims.n)));
    }
    let d = dims.d as usize;
    let dim = dims.hilbert_dim();
    let mixed = d.pow(k as u32);
    let weight = 1.0 / mixed as f64;
    let mut m = CMatrix::zeros(dim, dim);
    // the pure sites lead, so the support is the first d^k basis states
    for i in 0..mixed {
        m[(i, i)] = Complex64::new(weight, 0.0);
    }
    DensityOperator::from_matrix_unchecked(dims, m)
}

/// A Clifford circuit `U` with `U (phases[i] w(g_i)) U^dagger = Z_i` exactly,
/// by symplectic elimination on the generator labels followed by a WEYL
/// correction of the residual phase. Generators are processed in input order
/// and pivots are taken on the lowest-index nonzero site.
pub fn canonicalize(group: &IsotropicSubgroup) -> Result<CliffordCircuit> {
    let dims = group.dims;
    let d = dims.d;
    let roots = Roots::new(d);
    let checked = IsotropicSubgroup::new(dims, group.generators.clone(), group.phases.clone())?;
    let mut terms = Vec::with_capacity(checked.rank());
    for (g, lambda) in checked.generators.iter().zip(&checked.phases) {
        let e = roots
            .exponent_of(*lambda, 1e-6)
            .filter(|e| e % 2 == 0)
            .ok_or_else(|| Error::InvalidPhase(format!("{lambda} (must be a d-th root of unity)")))?;
        terms.push(PauliTerm::new(e, g.clone()));
    }

    let mut gates: Vec<Gate> = Vec::new();
    let mut cache = LocalCache::default();
    let mut push = |gate: Gate, terms: &mut Vec<PauliTerm>, gates: &mut Vec<Gate>| -> Result<()> {
        for t in terms.iter_mut() {
            *t = gate.conjugate(dims, t, &mut cache)?;
        }
        gates.push(gate);
        Ok(())
    };
    let inv = |a: u32| mod_inv(a, d).expect("nonzero residue");
    let mul = |a: u32, b: u32| (a as u64 * b as u64 % d as u64) as u32;

    for i in 0..terms.len() {
        // turn every site >= i of generator i into a pure Z-type component
        for l in i..dims.n {
            let (p, q) = (terms[i].point.p[l], terms[i].point.q[l]);
            if q == 0 {
                continue;
            }
            if p != 0 {
                let r = mul(d - p, inv(q));
                for _ in 0..r {
                    push(Gate::phase(l), &mut terms, &mut gates)?;
                }
            }
            push(Gate::fourier(l), &mut terms, &mut gates)?;
        }
        let x = &terms[i].point;
        debug_assert!(x.q.iter().all(|&v| v == 0));
        let pivot = (i..dims.n)
            .find(|&l| x.p[l] != 0)
            .ok_or(Error::DependentGenerators)?;
        if pivot != i && x.p[i] == 0 {
            push(Gate::sum(i, pivot), &mut terms, &mut gates)?;
        }
        // clear every other Z component, using generator i's site as target
        for l in 0..dims.n {
            let x = &terms[i].point;
            if l == i || x.p[l] == 0 {
                continue;
            }
            let c = mul(x.p[l], inv(x.p[i]));
            for _ in 0..c {
                push(Gate::sum(l, i), &mut terms, &mut gates)?;
            }
        }
        let a = terms[i].point.p[i];
        if a != 1 {
            push(Gate::mult(i, a), &mut terms, &mut gates)?;
        }
        let e = terms[i].phase;
        if e % 2 != 0 {
            return Err(Error::InvalidPhase(format!(
                "residual phase zeta^{e} is not a power of omega"
            )));
        }
        let r = e / 2;
        if r != 0 {
            let mut y = PhasePoint::zero(dims);
            y.q[i] = r;
            push(Gate::weyl(y), &mut terms, &mut gates)?;
        }
        debug_assert_eq!(terms[i], PauliTerm::new(0, PhasePoint::z_at(dims, i)));
    }
    CliffordCircuit::new(dims, gates)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::{char_function, von_neumann_entropy};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn fourier_is_hadamard_for_qubits() {
        let h = gate_matrix(&GateKind::Fourier, 2).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let expect = CMatrix::from_row_slice(2, 2, &[c(s, 0.), c(s, 0.), c(s, 0.), c(-s, 0.)]);
        assert!(max_abs_diff(&h, &expect) < 1e-15);
    }

    #[test]
    fn sum_is_cnot_adding_control_into_target() {
        // SUM with control on site 1, target on site 0: |x>|y> -> |x+y>|y>
        let dims = Dims::new(2, 2).unwrap();
        let u = CliffordCircuit::new(dims, vec![Gate::sum(1, 0)]).unwrap().unitary().unwrap();
        for x in 0..2usize {
            for y in 0..2usize {
                let col = x * 2 + y;
                let row = ((x + y) % 2) * 2 + y;
                assert_eq!(u[(row, col)], c(1., 0.));
            }
        }
        let cnot = gate_matrix(&GateKind::Sum, 2).unwrap();
        let expect = CMatrix::from_fn(4, 4, |r, col| {
            let target = [0usize, 1, 3, 2][col];
            if r == target { c(1., 0.) } else { c(0., 0.) }
        });
        assert!(max_abs_diff(&cnot, &expect) < 1e-15);
    }

    #[test]
    fn mult_is_permutation() {
        let m = gate_matrix(&GateKind::Mult(3), 7).unwrap();
        for k in 0..7usize {
            assert_eq!(m[(3 * k % 7, k)], c(1., 0.));
        }
        assert!(matches!(
            gate_matrix(&GateKind::Mult(0), 7),
            Err(Error::NonInvertibleMultiplier { .. })
        ));
    }

    #[test]
    fn generators_are_clifford() {
        for d in [2u32, 3, 5, 7] {
            let one = Dims::new(1, d).unwrap();
            let two = Dims::new(2, d).unwrap();
            assert!(is_clifford(one, &gate_matrix(&GateKind::Fourier, d).unwrap()).unwrap());
            assert!(is_clifford(one, &gate_matrix(&GateKind::Phase, d).unwrap()).unwrap());
            assert!(is_clifford(two, &gate_matrix(&GateKind::Sum, d).unwrap()).unwrap());
            if d > 2 {
                assert!(is_clifford(one, &gate_matrix(&GateKind::Mult(2), d).unwrap()).unwrap());
            }
        }
    }

    #[test]
    fn is_clifford_examples() {
        let dims = Dims::new(1, 2).unwrap();
        assert!(is_clifford(dims, &CMatrix::identity(2, 2)).unwrap());
        let t = CMatrix::from_row_slice(
            2,
            2,
            &[c(1., 0.), c(0., 0.), c(0., 0.), Complex64::from_polar(1.0, std::f64::consts::FRAC_PI_4)],
        );
        assert!(!is_clifford(dims, &t).unwrap());
        assert!(matches!(is_clifford(dims, &(CMatrix::identity(2, 2) * c(2., 0.))), Err(Error::NonUnitary(_))));
    }

    #[test]
    fn random_clifford_is_deterministic() {
        let dims = Dims::new(2, 7).unwrap();
        assert_eq!(random_clifford(dims, 20, 5).unwrap(), random_clifford(dims, 20, 5).unwrap());
        assert_ne!(random_clifford(dims, 20, 5).unwrap(), random_clifford(dims, 20, 6).unwrap());
        let one = random_clifford(Dims::new(1, 2).unwrap(), 1, 0).unwrap();
        assert_eq!(one.len(), 1);
        assert!(random_clifford(dims, 0, 0).is_err());
    }

    #[test]
    fn sampled_circuits_and_compositions_are_clifford() {
        let dims = Dims::new(2, 7).unwrap();
        for seed in 0..100 {
            let u = random_clifford(dims, 20, seed).unwrap();
            assert!(is_clifford(dims, &u.unitary().unwrap()).unwrap(), "seed {seed}");
        }
        let a = random_clifford(dims, 10, 1000).unwrap();
        let b = random_clifford(dims, 10, 1001).unwrap();
        assert!(is_clifford(dims, &a.then(&b).unwrap().unitary().unwrap()).unwrap());
    }

    #[test]
    fn label_tracking_matches_dense_conjugation() {
        for (n, d) in [(2usize, 2u32), (2, 3), (2, 7), (3, 2)] {
            let dims = Dims::new(n, d).unwrap();
            for seed in 0..10 {
                let circ = random_clifford(dims, 15, seed).unwrap();
                let u = circ.unitary().unwrap();
                for x in dims.points().step_by(7) {
                    let term = PauliTerm::new(0, x);
                    let img = circ.conjugate_term(&term).unwrap();
                    let dense = &u * term.to_matrix() * u.adjoint();
                    assert!(max_abs_diff(&img.to_matrix(), &dense) < 1e-10);
                }
            }
        }
    }

    #[test]
    fn apply_examples() {
        let dims = Dims::new(1, 2).unwrap();
        let zero = DensityOperator::basis_state(dims, 0);
        let same = apply(&CliffordCircuit::identity(dims), &zero).unwrap();
        assert!(same.max_abs_diff(&zero) < 1e-15);
        let plus = apply(&CliffordCircuit::new(dims, vec![Gate::fourier(0)]).unwrap(), &zero).unwrap();
        let expect = DensityOperator::from_pure(dims, &[c(1., 0.), c(1., 0.)]).unwrap();
        assert!(plus.max_abs_diff(&expect) < 1e-12);
        let wrong = CliffordCircuit::identity(Dims::new(2, 2).unwrap());
        assert!(apply(&wrong, &zero).is_err());
    }

    #[test]
    fn prepared_stabilizers_have_flat_char_support() {
        for (n, d) in [(2usize, 2u32), (2, 7), (3, 2)] {
            let dims = Dims::new(n, d).unwrap();
            for seed in 0..10 {
                let circ = random_clifford(dims, 25, seed).unwrap();
                let rho = prepare_stabilizer(&circ).unwrap();
                let xi = char_function(&rho).unwrap();
                let ones = xi.values().iter().filter(|z| (z.norm() - 1.0).abs() < 1e-9).count();
                let zeros = xi.values().iter().filter(|z| z.norm() < 1e-9).count();
                assert_eq!(ones, dims.hilbert_dim());
                assert_eq!(ones + zeros, dims.num_points());
                assert!(von_neumann_entropy(&rho).unwrap() < 1e-9);
            }
        }
    }

    #[test]
    fn apply_preserves_spectrum() {
        let dims = Dims::new(2, 3).unwrap();
        let rho = DensityOperator::basis_state(dims, 0)
            .matrix()
            .scale(0.6)
            + DensityOperator::maximally_mixed(dims).matrix().scale(0.4);
        let rho = DensityOperator::new(dims, rho).unwrap();
        let s0 = von_neumann_entropy(&rho).unwrap();
        for seed in 0..5 {
            let out = apply(&random_clifford(dims, 30, seed).unwrap(), &rho).unwrap();
            assert!((von_neumann_entropy(&out).unwrap() - s0).abs() < 1e-9);
        }
    }

    fn stabilizer_projector(group: &IsotropicSubgroup) -> CMatrix {
        let dims = group.dims;
        let dim = dims.hilbert_dim();
        let roots = Roots::new(dims.d);
        let mut m = CMatrix::identity(dim, dim) / c(dim as f64, 0.);
        for (g, lambda) in group.generators.iter().zip(&group.phases) {
            let e = roots.exponent_of(*lambda, 1e-9).unwrap();
            let t = PauliTerm::new(e, g.clone());
            let mut sum = CMatrix::zeros(dim, dim);
            for k in 0..dims.d {
                sum += t.pow(k).to_matrix();
            }
            m *= sum;
        }
        m
    }

    #[test]
    fn canonicalize_small_examples() {
        let dims = Dims::new(2, 3).unwrap();
        let one = c(1., 0.);
        let z_group = IsotropicSubgroup::new(
            dims,
            vec![PhasePoint::z_at(dims, 0), PhasePoint::z_at(dims, 1)],
            vec![one, one],
        )
        .unwrap();
        let circ = canonicalize(&z_group).unwrap();
        let rho = DensityOperator::from_matrix_unchecked(dims, stabilizer_projector(&z_group)).unwrap();
        assert!(apply(&circ, &rho).unwrap().max_abs_diff(&rho) < 1e-12);

        let q = Dims::new(1, 2).unwrap();
        let x_group = IsotropicSubgroup::new(q, vec![PhasePoint::x_at(q, 0)], vec![one]).unwrap();
        let circ = canonicalize(&x_group).unwrap();
        let img = circ.conjugate_term(&PauliTerm::new(0, PhasePoint::x_at(q, 0))).unwrap();
        assert_eq!(img, PauliTerm::new(0, PhasePoint::z_at(q, 0)));
    }

    #[test]
    fn canonicalize_random_groups() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for (n, d) in [(1usize, 2u32), (2, 2), (1, 7), (2, 7), (3, 3)] {
            let dims = Dims::new(n, d).unwrap();
            for _ in 0..50 {
                let rank = rng.random_range(0..=n);
                let group = IsotropicSubgroup::random(dims, rank, &mut rng).unwrap();
                let circ = canonicalize(&group).unwrap();
                let rho = DensityOperator::from_matrix_unchecked(dims, stabilizer_projector(&group)).unwrap();
                let out = apply(&circ, &rho).unwrap();
                let expect = canonical_mean_state(dims, n - rank).unwrap();
                assert!(out.max_abs_diff(&expect) < 1e-9, "n={n} d={d} rank={rank}");
            }
        }
    }

    #[test]
    fn canonicalize_rejects_bad_phase() {
        let q = Dims::new(1, 2).unwrap();
        let g = IsotropicSubgroup::new(q, vec![PhasePoint::z_at(q, 0)], vec![c(0., 1.)]).unwrap();
        assert!(matches!(canonicalize(&g), Err(Error::InvalidPhase(_))));
    }
}
