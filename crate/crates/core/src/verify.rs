//! Seeded property suites for the convolution: duality, stability,
//! central-limit convergence, maximal entropy and Clifford covariance.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::clifford::{apply, canonicalize, prepare_stabilizer, random_clifford_with};
use crate::convolution::{
    convolve3_char, convolve3_dense, convolve_char, convolve_dense, find_params, iterate_char,
    self_convolve_char, validate_qubit_char_path, SelfConvolution,
};
use crate::error::Result;
use crate::magic::{magic_gap, mean_state, DIRECT_TOL};
use crate::operators::{
    char_function_unchecked, inverse_char, trace_distance, von_neumann_entropy, DensityOperator,
};
use crate::phase_space::Dims;
use crate::states::{psi_k, random_mixed, random_pure};

pub const SUITE_FORMAT_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    Duality,
    Stability,
    Clt,
    MaxEntropy,
    CliffordCovariance,
}

impl Suite {
    pub const ALL: [Suite; 5] = [
        Suite::Duality,
        Suite::Stability,
        Suite::Clt,
        Suite::MaxEntropy,
        Suite::CliffordCovariance,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Suite::Duality => "duality",
            Suite::Stability => "stability",
            Suite::Clt => "clt",
            Suite::MaxEntropy => "max-entropy",
            Suite::CliffordCovariance => "clifford-covariance",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub format_version: u32,
    pub suite: Suite,
    pub seed: u64,
    pub cases: usize,
    pub failures: usize,
    /// Largest observed value of the suite's checked quantity.
    pub max_deviation: f64,
    pub tolerance: f64,
    pub passed: bool,
}

struct Tally {
    cases: usize,
    failures: usize,
    worst: f64,
    tol: f64,
}

impl Tally {
    fn new(tol: f64) -> Self {
        Tally {
            cases: 0,
            failures: 0,
            worst: 0.0,
            tol,
        }
    }

    /// Records a case that passes when `value <= tol`.
    fn check(&mut self, value: f64) {
        self.cases += 1;
        self.worst = self.worst.max(value);
        if value.is_nan() || value > self.tol {
            self.failures += 1;
        }
    }

    fn finish(self, suite: Suite, seed: u64) -> SuiteReport {
        SuiteReport {
            format_version: SUITE_FORMAT_VERSION,
            suite,
            seed,
            cases: self.cases,
            failures: self.failures,
            max_deviation: self.worst,
            tolerance: self.tol,
            passed: self.failures == 0 && self.cases > 0,
        }
    }
}

pub fn run(suite: Suite, seed: u64) -> Result<SuiteReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tally = match suite {
        Suite::Duality => duality(&mut rng)?,
        Suite::Stability => stability(&mut rng)?,
        Suite::Clt => clt(&mut rng)?,
        Suite::MaxEntropy => max_entropy(&mut rng)?,
        Suite::CliffordCovariance => clifford_covariance(&mut rng)?,
    };
    Ok(tally.finish(suite, seed))
}

fn random_state(dims: Dims, rng: &mut ChaCha8Rng) -> DensityOperator {
    if rng.random_bool(0.5) {
        random_pure(dims, rng)
    } else {
        let rank = rng.random_range(2..=dims.hilbert_dim().min(4));
        random_mixed(dims, rank, rng)
    }
}

fn random_stabilizer(dims: Dims, rng: &mut ChaCha8Rng) -> Result<DensityOperator> {
    prepare_stabilizer(&random_clifford_with(dims, 8 * dims.n + 4, rng)?)
}

/// Dense against char-domain convolution, 50 pairs per `d` in `{7, 11}` at `n = 1`.
fn duality(rng: &mut ChaCha8Rng) -> Result<Tally> {
    let mut t = Tally::new(1e-10);
    for d in [7u32, 11] {
        let dims = Dims::new(1, d)?;
        let params = find_params(d)?;
        for i in 0..50 {
            let p = params[i % params.len()];
            let a = random_state(dims, rng);
            let b = random_state(dims, rng);
            let dense = convolve_dense(&a, &b, p)?;
            let fast = convolve_char(&char_function_unchecked(&a), &char_function_unchecked(&b), p)?;
            t.check(inverse_char(&fast).max_abs_diff(&dense));
        }
    }
    Ok(t)
}

/// Convolutions of stabilizer states have `|Xi|` in `{0, 1}`.
fn stability(rng: &mut ChaCha8Rng) -> Result<Tally> {
    let mut t = Tally::new(1e-9);
    let distance = |rho: &DensityOperator| {
        char_function_unchecked(rho)
            .values()
            .iter()
            .map(|z| {
                let r = z.norm();
                r.min((1.0 - r).abs())
            })
            .fold(0.0, f64::max)
    };
    for (n, d) in [(1usize, 7u32), (2, 7), (1, 11)] {
        let dims = Dims::new(n, d)?;
        let p = find_params(d)?[0];
        for _ in 0..10 {
            let a = random_stabilizer(dims, rng)?;
            let b = random_stabilizer(dims, rng)?;
            t.check(distance(&convolve_dense(&a, &b, p)?));
        }
    }
    for n in [1usize, 2] {
        let dims = Dims::new(n, 2)?;
        for _ in 0..10 {
            let a = random_stabilizer(dims, rng)?;
            let b = random_stabilizer(dims, rng)?;
            let c = random_stabilizer(dims, rng)?;
            t.check(distance(&convolve3_dense(&a, &b, &c)?));
        }
    }
    Ok(t)
}

/// Trace distance of the `L = 8` iterate to the mean state, over random pure
/// states with magic gap above 0.05.
fn clt(rng: &mut ChaCha8Rng) -> Result<Tally> {
    let mut t = Tally::new(1e-6);
    for (n, d) in [(1usize, 7u32), (2, 7), (1, 2), (2, 2), (3, 2)] {
        let dims = Dims::new(n, d)?;
        let conv = SelfConvolution::default_for(d)?;
        let mut accepted = 0;
        while accepted < 5 {
            let rho = random_pure(dims, rng);
            let xi = char_function_unchecked(&rho);
            if magic_gap(&xi, DIRECT_TOL) <= 0.05 {
                continue;
            }
            accepted += 1;
            let mean = mean_state(&xi, DIRECT_TOL)?.to_dense()?;
            let out = inverse_char(&iterate_char(&xi, conv, 8)?);
            t.check(trace_distance(&out, &mean)?);
        }
    }
    Ok(t)
}

/// `S(rho) <= S(M(rho))` on 100 random states; records `S(rho) - S(M)`.
fn max_entropy(rng: &mut ChaCha8Rng) -> Result<Tally> {
    let mut t = Tally::new(1e-9);
    let shapes = [(1usize, 7u32), (2, 7), (2, 2), (3, 2), (2, 3)];
    for i in 0..100 {
        let (n, d) = shapes[i % shapes.len()];
        let dims = Dims::new(n, d)?;
        let rho = match i % 3 {
            0 => {
                let k = rng.random_range(0..=n);
                psi_k(dims, k, &random_clifford_with(dims, 10, rng)?)?
            }
            _ => random_state(dims, rng),
        };
        let mean = mean_state(&char_function_unchecked(&rho), DIRECT_TOL)?.to_dense()?;
        t.check(von_neumann_entropy(&rho)? - von_neumann_entropy(&mean)?);
    }
    Ok(t)
}

/// Canonicalized mean states of one convolution step agree with and
/// without a Clifford applied to the input; records the max entry deviation.
fn clifford_covariance(rng: &mut ChaCha8Rng) -> Result<Tally> {
    let mut t = Tally::new(1e-9);
    for (n, d) in [(2usize, 7u32), (1, 7), (2, 2), (3, 2)] {
        let dims = Dims::new(n, d)?;
        let conv = SelfConvolution::default_for(d)?;
        for case in 0..8 {
            let rho = if case % 2 == 0 {
                let k = rng.random_range(0..=n);
                psi_k(dims, k, &random_clifford_with(dims, 10, rng)?)?
            } else {
                random_pure(dims, rng)
            };
            let u = random_clifford_with(dims, 12, rng)?;
            let moved = apply(&u, &rho)?;
            let canon = |state: &DensityOperator| -> Result<DensityOperator> {
                let out = self_convolve_char(&char_function_unchecked(state), conv)?;
                let m = mean_state(&out, DIRECT_TOL)?;
                apply(&canonicalize(&m.group)?, &m.to_dense()?)
            };
            t.check(canon(&rho)?.max_abs_diff(&canon(&moved)?));
        }
    }
    Ok(t)
}

/// Runs the qubit oracle gate and reports the three-copy cross-path error
/// over `triples` random triples at `n = 1, 2`.
pub fn qubit_cross_path(seed: u64, triples: usize) -> Result<f64> {
    validate_qubit_char_path()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for i in 0..triples {
        let dims = Dims::new(1 + i % 2, 2)?;
        let (a, b, c) = (
            random_state(dims, &mut rng),
            random_state(dims, &mut rng),
            random_state(dims, &mut rng),
        );
        let dense = convolve3_dense(&a, &b, &c)?;
        let fast = convolve3_char(
            &char_function_unchecked(&a),
            &char_function_unchecked(&b),
            &char_function_unchecked(&c),
        )?;
        worst = worst.max(inverse_char(&fast).max_abs_diff(&dense));
    }
    Ok(worst)
}
