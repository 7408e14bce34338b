//! State builders: product states, the magic-state family and random states.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::clifford::CliffordCircuit;
use crate::error::{Error, Result};
use crate::operators::{CMatrix, DensityOperator};
use crate::phase_space::Dims;

/// Single-qudit magic state: `(|0> + |1>)/sqrt 2` for odd `d`,
/// `(|0> + e^(i pi/4)|1>)/sqrt 2` for qubits.
pub fn magic_vector(d: u32) -> Vec<Complex64> {
    let mut v = vec![Complex64::new(0.0, 0.0); d as usize];
    let s = std::f64::consts::FRAC_1_SQRT_2;
    v[0] = Complex64::new(s, 0.0);
    v[1] = if d == 2 {
        Complex64::from_polar(s, std::f64::consts::FRAC_PI_4)
    } else {
        Complex64::new(s, 0.0)
    };
    v
}

fn kron_vectors(a: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
    a.iter().flat_map(|x| b.iter().map(move |y| x * y)).collect()
}

/// `|magic>^k (x) |0>^(n-k)` as amplitudes.
pub fn magic_product_vector(dims: Dims, k: usize) -> Result<Vec<Complex64>> {
    if k > dims.n {
        return Err(Error::Unsupported(format!("k = {k} exceeds n = {}", dims.n)));
    }
    let mut zero = vec![Complex64::new(0.0, 0.0); dims.d as usize];
    zero[0] = Complex64::new(1.0, 0.0);
    let magic = magic_vector(dims.d);
    let mut v = vec![Complex64::new(1.0, 0.0)];
    for site in 0..dims.n {
        v = kron_vectors(&v, if site < k { &magic } else { &zero });
    }
    Ok(v)
}

/// `|0...0><0...0|`.
pub fn zeros(dims: Dims) -> DensityOperator {
    DensityOperator::basis_state(dims, 0)
}

/// `U_C |magic>^k (x) |0>^(n-k)` for the Clifford word `dressing`.
pub fn psi_k(dims: Dims, k: usize, dressing: &CliffordCircuit) -> Result<DensityOperator> {
    if dressing.dims != dims {
        return Err(Error::DimensionMismatch("dressing circuit shape".into()));
    }
    let mut v = magic_product_vector(dims, k)?;
    dressing.apply_to_vector(&mut v)?;
    DensityOperator::from_pure(dims, &v)
}

/// Haar-distributed pure state vector (normalized complex Gaussian).
pub fn random_pure_vector<R: Rng + ?Sized>(dims: Dims, rng: &mut R) -> Vec<Complex64> {
    let v: Vec<Complex64> = (0..dims.hilbert_dim())
        .map(|_| {
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = StandardNormal.sample(rng);
            Complex64::new(re, im)
        })
        .collect();
    let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    v.into_iter().map(|z| z / norm).collect()
}

pub fn random_pure<R: Rng + ?Sized>(dims: Dims, rng: &mut R) -> DensityOperator {
    DensityOperator::from_pure(dims, &random_pure_vector(dims, rng))
        .expect("normalized vector of the right length")
}

/// Random mixture of `rank` Haar pure states with uniform random weights.
pub fn random_mixed<R: Rng + ?Sized>(dims: Dims, rank: usize, rng: &mut R) -> DensityOperator {
    let dim = dims.hilbert_dim();
    let weights: Vec<f64> = (0..rank.max(1)).map(|_| rng.random::<f64>() + 1e-3).collect();
    let total: f64 = weights.iter().sum();
    let mut m = CMatrix::zeros(dim, dim);
    for w in weights {
        let v = random_pure_vector(dims, rng);
        m += CMatrix::from_fn(dim, dim, |i, j| v[i] * v[j].conj() * (w / total));
    }
    let m = (&m + m.adjoint()) * Complex64::new(0.5, 0.0);
    DensityOperator::from_matrix_unchecked(dims, m).expect("shape matches")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clifford::random_clifford;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn magic_vectors_are_normalized() {
        for d in [2u32, 3, 7] {
            let n: f64 = magic_vector(d).iter().map(|z| z.norm_sqr()).sum();
            assert!((n - 1.0).abs() < 1e-15);
        }
        let t = magic_vector(2);
        assert!((t[1].arg() - std::f64::consts::FRAC_PI_4).abs() < 1e-15);
    }

    #[test]
    fn psi_k_is_valid_pure_state() {
        let dims = Dims::new(3, 2).unwrap();
        let circ = random_clifford(dims, 20, 7).unwrap();
        let rho = psi_k(dims, 2, &circ).unwrap();
        rho.validate().unwrap();
        assert!((rho.purity() - 1.0).abs() < 1e-12);
        assert!(psi_k(dims, 4, &circ).is_err());
    }

    #[test]
    fn random_states_are_valid() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let dims = Dims::new(2, 3).unwrap();
        random_pure(dims, &mut rng).validate().unwrap();
        let mixed = random_mixed(dims, 3, &mut rng);
        mixed.validate().unwrap();
        assert!(mixed.purity() < 1.0 - 1e-6);
    }
}
