//! Arithmetic on the discrete phase space `V^n = Z_d^n x Z_d^n`.
//!
//! A [`PhasePoint`] `x = (p, q)` labels the Weyl operator `w(x)`. The
//! symplectic pairing is fixed as
//!
//! ```text
//! <x, y> = p_x . q_y - q_x . p_y   (mod d)
//! ```
//!
//! which is the convention under which `w(x) w(y) = omega^<x,y> w(y) w(x)`
//! holds for the Weyl matrices built in [`crate::operators`]. The dense
//! commutation tests pin this sign.
//!
//! Point tables are indexed as `index(x) = idx(p) * d^n + idx(q)`, where
//! `idx` reads a residue vector as a base-`d` number with site 0 most
//! significant.

use std::collections::HashSet;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest `n * d^(2n)` for which subgroup spans are materialized.
pub const SPAN_MATERIALIZE_LIMIT: u64 = 10_000_000;

/// System parameters: `n` sites of local dimension `d`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Dims {
    pub n: usize,
    pub d: u32,
}

impl Dims {
    /// Rejects composite `d` and `n = 0`.
    pub fn new(n: usize, d: u32) -> Result<Self> {
        if !is_supported_modulus(d) {
            return Err(Error::InvalidModulus(d));
        }
        if n == 0 {
            return Err(Error::NoSites);
        }
        Ok(Dims { n, d })
    }

    /// Hilbert-space dimension `d^n`.
    pub fn hilbert_dim(&self) -> usize {
        (self.d as usize).pow(self.n as u32)
    }

    /// Number of phase-space points `d^(2n)`.
    pub fn num_points(&self) -> usize {
        let h = self.hilbert_dim();
        h * h
    }

    /// Base-`d` digits of a computational-basis index, site 0 first.
    pub fn digits(&self, mut index: usize) -> Vec<u32> {
        let d = self.d as usize;
        let mut out = vec![0u32; self.n];
        for slot in out.iter_mut().rev() {
            *slot = (index % d) as u32;
            index /= d;
        }
        out
    }

    pub fn basis_index(&self, digits: &[u32]) -> usize {
        digits
            .iter()
            .fold(0usize, |acc, &v| acc * self.d as usize + v as usize)
    }

    pub fn point_at(&self, index: usize) -> PhasePoint {
        let h = self.hilbert_dim();
        PhasePoint {
            d: self.d,
            p: self.digits(index / h),
            q: self.digits(index % h),
        }
    }

    pub fn point_index(&self, x: &PhasePoint) -> usize {
        self.basis_index(&x.p) * self.hilbert_dim() + self.basis_index(&x.q)
    }

    /// Iterator over every point in table order.
    pub fn points(&self) -> impl Iterator<Item = PhasePoint> + '_ {
        (0..self.num_points()).map(move |i| self.point_at(i))
    }

    pub fn check_point(&self, x: &PhasePoint) -> Result<()> {
        if x.d != self.d || x.n() != self.n {
            return Err(Error::DimensionMismatch(format!(
                "point over (n={}, d={}) used with (n={}, d={})",
                x.n(),
                x.d,
                self.n,
                self.d
            )));
        }
        Ok(())
    }
}

/// `d` is 2 or an odd prime.
pub fn is_supported_modulus(d: u32) -> bool {
    if d < 2 {
        return false;
    }
    if d == 2 {
        return true;
    }
    if d.is_multiple_of(2) {
        return false;
    }
    let mut f = 3u32;
    while f.saturating_mul(f) <= d {
        if d.is_multiple_of(f) {
            return false;
        }
        f += 2;
    }
    true
}

pub fn mod_pow(mut base: u64, mut exp: u64, m: u64) -> u64 {
    let mut acc = 1 % m;
    base %= m;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = acc * base % m;
        }
        base = base * base % m;
        exp >>= 1;
    }
    acc
}

/// Inverse modulo a prime `d`; `None` for zero.
pub fn mod_inv(a: u32, d: u32) -> Option<u32> {
    let a = a % d;
    if a == 0 {
        return None;
    }
    Some(mod_pow(a as u64, (d - 2) as u64, d as u64) as u32)
}

fn sub_mod(a: u32, b: u32, d: u32) -> u32 {
    (a + d - b % d) % d
}

/// A point `x = (p, q)` of `V^n`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PhasePoint {
    pub d: u32,
    pub p: Vec<u32>,
    pub q: Vec<u32>,
}

impl PhasePoint {
    pub fn new(d: u32, p: Vec<u32>, q: Vec<u32>) -> Result<Self> {
        if !is_supported_modulus(d) {
            return Err(Error::InvalidModulus(d));
        }
        if p.len() != q.len() {
            return Err(Error::DimensionMismatch(format!(
                "p has {} sites, q has {}",
                p.len(),
                q.len()
            )));
        }
        if p.iter().chain(q.iter()).any(|&v| v >= d) {
            return Err(Error::Format(format!("residue out of range [0, {d})")));
        }
        Ok(PhasePoint { d, p, q })
    }

    pub fn zero(dims: Dims) -> Self {
        PhasePoint {
            d: dims.d,
            p: vec![0; dims.n],
            q: vec![0; dims.n],
        }
    }

    /// `Z` on one site: `(e_site, 0)`.
    pub fn z_at(dims: Dims, site: usize) -> Self {
        let mut x = Self::zero(dims);
        x.p[site] = 1;
        x
    }

    /// `X` on one site: `(0, e_site)`.
    pub fn x_at(dims: Dims, site: usize) -> Self {
        let mut x = Self::zero(dims);
        x.q[site] = 1;
        x
    }

    pub fn n(&self) -> usize {
        self.p.len()
    }

    pub fn dims(&self) -> Dims {
        Dims {
            n: self.n(),
            d: self.d,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.p.iter().chain(self.q.iter()).all(|&v| v == 0)
    }

    fn same_shape(&self, other: &PhasePoint) -> bool {
        self.d == other.d && self.n() == other.n()
    }

    fn mismatch(&self, other: &PhasePoint) -> Error {
        Error::DimensionMismatch(format!(
            "points over (n={}, d={}) and (n={}, d={})",
            self.n(),
            self.d,
            other.n(),
            other.d
        ))
    }

    /// Componentwise sum. Panics on shape mismatch.
    pub fn add(&self, other: &PhasePoint) -> PhasePoint {
        assert!(self.same_shape(other), "{}", self.mismatch(other));
        let d = self.d;
        PhasePoint {
            d,
            p: self.p.iter().zip(&other.p).map(|(a, b)| (a + b) % d).collect(),
            q: self.q.iter().zip(&other.q).map(|(a, b)| (a + b) % d).collect(),
        }
    }

    pub fn neg(&self) -> PhasePoint {
        let d = self.d;
        PhasePoint {
            d,
            p: self.p.iter().map(|&a| (d - a) % d).collect(),
            q: self.q.iter().map(|&a| (d - a) % d).collect(),
        }
    }

    pub fn scale(&self, c: u32) -> PhasePoint {
        let d = self.d as u64;
        let c = c as u64 % d;
        PhasePoint {
            d: self.d,
            p: self.p.iter().map(|&a| (a as u64 * c % d) as u32).collect(),
            q: self.q.iter().map(|&a| (a as u64 * c % d) as u32).collect(),
        }
    }

    /// The `2n` coordinates `(p_1..p_n, q_1..q_n)`.
    pub fn coords(&self) -> Vec<u32> {
        self.p.iter().chain(self.q.iter()).copied().collect()
    }

    pub fn from_coords(d: u32, coords: &[u32]) -> PhasePoint {
        let n = coords.len() / 2;
        PhasePoint {
            d,
            p: coords[..n].to_vec(),
            q: coords[n..].to_vec(),
        }
    }

    /// Integer `sum_i p_i q_i`, unreduced.
    pub fn pq_dot(&self) -> u64 {
        self.p
            .iter()
            .zip(&self.q)
            .map(|(&a, &b)| a as u64 * b as u64)
            .sum()
    }
}

/// `<x, y> = p_x . q_y - q_x . p_y (mod d)`.
pub fn symplectic_product(x: &PhasePoint, y: &PhasePoint) -> Result<u32> {
    if !x.same_shape(y) {
        return Err(x.mismatch(y));
    }
    Ok(symplectic_unchecked(x, y))
}

pub(crate) fn symplectic_unchecked(x: &PhasePoint, y: &PhasePoint) -> u32 {
    let d = x.d as u64;
    let mut plus = 0u64;
    let mut minus = 0u64;
    for i in 0..x.n() {
        plus += x.p[i] as u64 * y.q[i] as u64;
        minus += x.q[i] as u64 * y.p[i] as u64;
    }
    sub_mod((plus % d) as u32, (minus % d) as u32, x.d)
}

fn check_shared(dims: Dims, g: &[PhasePoint]) -> Result<()> {
    g.iter().try_for_each(|x| dims.check_point(x))
}

/// Additive closure of `generators`, sorted by table index.
pub fn span(dims: Dims, generators: &[PhasePoint]) -> Result<Vec<PhasePoint>> {
    check_shared(dims, generators)?;
    let mut seen: HashSet<usize> = HashSet::new();
    let zero = PhasePoint::zero(dims);
    seen.insert(dims.point_index(&zero));
    let mut members = vec![zero];
    for g in generators {
        let mut next = members.clone();
        for base in &members {
            let mut cur = base.clone();
            for _ in 1..dims.d {
                cur = cur.add(g);
                if seen.insert(dims.point_index(&cur)) {
                    next.push(cur.clone());
                }
            }
        }
        members = next;
    }
    members.sort_by_key(|x| dims.point_index(x));
    Ok(members)
}

/// All pairwise symplectic products vanish. Mixed shapes are never isotropic.
pub fn is_isotropic(g: &[PhasePoint]) -> bool {
    for (i, x) in g.iter().enumerate() {
        for y in &g[i + 1..] {
            match symplectic_product(x, y) {
                Ok(0) => {}
                _ => return false,
            }
        }
    }
    true
}

/// Incremental row-echelon basis over `Z_d` used for independence tests.
#[derive(Clone, Debug)]
pub struct EchelonBasis {
    d: u32,
    width: usize,
    /// (pivot column, row normalized so the pivot entry is 1)
    rows: Vec<(usize, Vec<u32>)>,
}

impl EchelonBasis {
    pub fn new(d: u32, width: usize) -> Self {
        EchelonBasis {
            d,
            width,
            rows: Vec::new(),
        }
    }

    pub fn rank(&self) -> usize {
        self.rows.len()
    }

    /// Reduces `v` against the basis; the remainder is zero iff `v` is in the span.
    pub fn reduce(&self, v: &[u32]) -> Vec<u32> {
        debug_assert_eq!(v.len(), self.width);
        let d = self.d as u64;
        let mut v = v.to_vec();
        for (pivot, row) in &self.rows {
            let c = v[*pivot] as u64;
            if c == 0 {
                continue;
            }
            for (vi, ri) in v.iter_mut().zip(row) {
                *vi = ((*vi as u64 + d * d - c * *ri as u64) % d) as u32;
            }
        }
        v
    }

    pub fn contains(&self, v: &[u32]) -> bool {
        self.reduce(v).iter().all(|&c| c == 0)
    }

    /// Adds `v` if it is independent; returns whether it was added.
    pub fn insert(&mut self, v: &[u32]) -> bool {
        let mut r = self.reduce(v);
        let Some(pivot) = r.iter().position(|&c| c != 0) else {
            return false;
        };
        let inv = mod_inv(r[pivot], self.d).expect("nonzero residue mod prime");
        let d = self.d as u64;
        for c in r.iter_mut() {
            *c = (*c as u64 * inv as u64 % d) as u32;
        }
        // keep earlier rows reduced against the new pivot
        for (_, row) in self.rows.iter_mut() {
            let c = row[pivot] as u64;
            if c != 0 {
                for (ri, ni) in row.iter_mut().zip(&r) {
                    *ri = ((*ri as u64 + d * d - c * *ni as u64) % d) as u32;
                }
            }
        }
        self.rows.push((pivot, r));
        true
    }
}

/// Minimal independent generating set of `span(g)`, chosen as the subset of
/// `g` (in input order) that is independent of its predecessors.
pub fn symplectic_reduce(dims: Dims, g: &[PhasePoint]) -> Result<Vec<PhasePoint>> {
    check_shared(dims, g)?;
    let mut basis = EchelonBasis::new(dims.d, 2 * dims.n);
    Ok(g.iter()
        .filter(|x| basis.insert(&x.coords()))
        .cloned()
        .collect())
}

/// Number of `a` in `V^n` with `<a, x> = 0` for every generator `x`,
/// computed as `d^(2n - rank)` of the linear system `a -> <a, x>`.
pub fn symplectic_complement_size(dims: Dims, g: &[PhasePoint]) -> Result<u64> {
    check_shared(dims, g)?;
    let d = dims.d;
    let mut basis = EchelonBasis::new(d, 2 * dims.n);
    for x in g {
        // <a, x> = p_a . q_x - q_a . p_x  has coefficient vector (q_x, -p_x)
        let mut row = x.q.clone();
        row.extend(x.p.iter().map(|&v| (d - v) % d));
        basis.insert(&row);
    }
    let free = (2 * dims.n - basis.rank()) as u32;
    (d as u64)
        .checked_pow(free)
        .ok_or_else(|| Error::Unsupported(format!("{d}^{free} overflows u64")))
}

/// Generators of an isotropic subgroup with one unit-modulus phase each.
///
/// The phased operator of generator `g_i` is `phases[i] * w(g_i)`; the
/// stabilized state is the `+1` eigenspace of every phased generator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IsotropicSubgroup {
    pub dims: Dims,
    pub generators: Vec<PhasePoint>,
    pub phases: Vec<Complex64>,
}

impl IsotropicSubgroup {
    pub fn new(dims: Dims, generators: Vec<PhasePoint>, phases: Vec<Complex64>) -> Result<Self> {
        check_shared(dims, &generators)?;
        if generators.len() != phases.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} generators but {} phases",
                generators.len(),
                phases.len()
            )));
        }
        if let Some(bad) = phases.iter().find(|z| (z.norm() - 1.0).abs() > 1e-9) {
            return Err(Error::InvalidPhase(format!("{bad} (not unit modulus)")));
        }
        if !is_isotropic(&generators) {
            return Err(Error::NotIsotropic);
        }
        if symplectic_reduce(dims, &generators)?.len() != generators.len() {
            return Err(Error::DependentGenerators);
        }
        Ok(IsotropicSubgroup {
            dims,
            generators,
            phases,
        })
    }

    pub fn trivial(dims: Dims) -> Self {
        IsotropicSubgroup {
            dims,
            generators: Vec::new(),
            phases: Vec::new(),
        }
    }

    pub fn rank(&self) -> usize {
        self.generators.len()
    }

    /// `d^rank`.
    pub fn size(&self) -> u64 {
        (self.dims.d as u64).pow(self.rank() as u32)
    }

    /// Whether `n * d^(2n)` is small enough to materialize spans eagerly.
    pub fn materializable(&self) -> bool {
        let pts = (self.dims.d as u64).checked_pow(2 * self.dims.n as u32);
        matches!(pts, Some(p) if p.saturating_mul(self.dims.n as u64) <= SPAN_MATERIALIZE_LIMIT)
    }

    pub fn elements(&self) -> Result<Vec<PhasePoint>> {
        if !self.materializable() {
            return Err(Error::Unsupported(format!(
                "span materialization above n*d^(2n) = {SPAN_MATERIALIZE_LIMIT}"
            )));
        }
        span(self.dims, &self.generators)
    }

    pub fn contains(&self, x: &PhasePoint) -> bool {
        let mut basis = EchelonBasis::new(self.dims.d, 2 * self.dims.n);
        for g in &self.generators {
            basis.insert(&g.coords());
        }
        basis.contains(&x.coords())
    }

    /// Random isotropic subgroup of the given rank, built greedily from
    /// uniformly drawn points. Phases are random `d`-th roots of unity
    /// (`+-1` for qubits), which keeps the phased generators of order `d`.
    pub fn random<R: Rng + ?Sized>(dims: Dims, rank: usize, rng: &mut R) -> Result<Self> {
        if rank > dims.n {
            return Err(Error::Unsupported(format!(
                "isotropic rank {rank} exceeds n = {}",
                dims.n
            )));
        }
        let mut generators: Vec<PhasePoint> = Vec::with_capacity(rank);
        let mut basis = EchelonBasis::new(dims.d, 2 * dims.n);
        while generators.len() < rank {
            let idx = rng.random_range(1..dims.num_points());
            let x = dims.point_at(idx);
            if generators.iter().any(|g| symplectic_unchecked(g, &x) != 0) {
                continue;
            }
            if basis.insert(&x.coords()) {
                generators.push(x);
            }
        }
        let phases = (0..rank)
            .map(|_| {
                let r = rng.random_range(0..dims.d);
                Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * r as f64 / dims.d as f64)
            })
            .collect();
        Self::new(dims, generators, phases)
    }
}
