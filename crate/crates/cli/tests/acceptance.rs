//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs without the libtest harness so every line is printed; the process
//! exits nonzero if any criterion fails.

use std::panic::{self, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use magicflow::clifford::{
    apply, canonicalize, random_clifford, random_clifford_with, CliffordCircuit, Gate,
};
use magicflow::convolution::{
    find_params, iterate, key_unitary_qubit, qubit_char_path_validated, Mode, SelfConvolution,
};
use magicflow::magic::{
    entropy_bound, magic_gap, mean_state, required_iterations, symmetry_count, ClassifyOptions,
    DIRECT_TOL,
};
use magicflow::operators::{
    char_function, hermitian_eigenvalues, von_neumann_entropy, weyl_matrix, CMatrix,
};
use magicflow::phase_space::symplectic_complement_size;
use magicflow::states::{psi_k, random_mixed, random_pure};
use magicflow::verify::{self, Suite};
use magicflow::{classify, same_cg_class, DensityOperator, Dims, Error, IsotropicSubgroup};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn e2s<T>(r: magicflow::Result<T>) -> Result<T, String> {
    r.map_err(|e| e.to_string())
}

fn dims(n: usize, d: u32) -> Dims {
    Dims::new(n, d).unwrap()
}

fn max_entry(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// psi_k lands in class k with agreeing verdicts.
fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut cases = 0;
    for (n, d) in [(3usize, 2u32), (3, 7)] {
        let dm = dims(n, d);
        for k in 0..=n {
            for rep in 0..20u64 {
                let dressing = e2s(random_clifford(dm, 20, 1000 * k as u64 + rep))?;
                let rho = e2s(psi_k(dm, k, &dressing))?;
                let report = e2s(classify(&rho, &ClassifyOptions::default()))?;
                ensure(report.k == k && report.verdicts.agree, || {
                    format!("(d={d}, n={n}) built k={k}, got {}", report.summary())
                })?;
                ensure(report.verdicts.k_entropy == Some(k), || "entropy verdict missing".into())?;
                cases += 1;
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    ensure(secs < 120.0, || format!("runtime {secs:.1}s exceeds 2 minutes"))?;
    Ok(format!("{cases} states classified, {secs:.1}s"))
}

/// Clifford conjugation preserves the class.
fn criterion_2() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut cases = 0;
    for (n, d) in [(2usize, 7u32), (3, 2)] {
        let dm = dims(n, d);
        for i in 0..100 {
            let psi = if i % 2 == 0 {
                random_pure(dm, &mut rng)
            } else {
                let k = rng.random_range(0..=n);
                e2s(psi_k(dm, k, &e2s(random_clifford_with(dm, 15, &mut rng))?))?
            };
            let u = e2s(random_clifford_with(dm, 25, &mut rng))?;
            let moved = e2s(apply(&u, &psi))?;
            ensure(e2s(same_cg_class(&psi, &moved))?, || format!("pair {i} at (d={d}, n={n})"))?;
            cases += 1;
        }
    }
    Ok(format!("{cases} pairs"))
}

/// Mean state built densely as `(1/D) prod_i sum_c (lambda_i w(g_i))^c`.
fn dense_mean_from_group(g: &IsotropicSubgroup) -> CMatrix {
    let dm = g.dims;
    let dim = dm.hilbert_dim();
    let mut m = CMatrix::identity(dim, dim);
    for (x, lambda) in g.generators.iter().zip(&g.phases) {
        let w = weyl_matrix(dm, x).unwrap() * *lambda;
        let mut sum = CMatrix::zeros(dim, dim);
        let mut power = CMatrix::identity(dim, dim);
        for _ in 0..dm.d {
            sum += &power;
            power = &power * &w;
        }
        m = &m * sum;
    }
    m / Complex64::new(dim as f64, 0.0)
}

fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

/// `|0><0|^(n-k) (x) (I/d)^k` by explicit Kronecker products.
fn canonical_target(n: usize, d: u32, k: usize) -> CMatrix {
    let d = d as usize;
    let mut zero = CMatrix::zeros(d, d);
    zero[(0, 0)] = Complex64::new(1.0, 0.0);
    let mixed = CMatrix::identity(d, d) / Complex64::new(d as f64, 0.0);
    let mut m = CMatrix::identity(1, 1);
    for site in 0..n {
        m = kron(&m, if site < n - k { &zero } else { &mixed });
    }
    m
}

fn subgroup_corpus() -> Vec<IsotropicSubgroup> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let shapes = [(1usize, 2u32), (2, 2), (1, 7), (2, 7)];
    (0..50)
        .map(|i| {
            let (n, d) = shapes[i % shapes.len()];
            let rank = rng.random_range(0..=n);
            IsotropicSubgroup::random(dims(n, d), rank, &mut rng).unwrap()
        })
        .collect()
}

/// Commuting Weyl operators number d^(n+k), by brute force and by the fast path.
fn criterion_3() -> Outcome {
    for (i, g) in subgroup_corpus().iter().enumerate() {
        let dm = g.dims;
        let (n, d) = (dm.n, dm.d as u64);
        let k = n - g.rank();
        let m = dense_mean_from_group(g);
        let mut brute = 0u64;
        for a in dm.points() {
            let w = weyl_matrix(dm, &a).unwrap();
            if max_entry(&(&m * &w - &w * &m)) < 1e-8 {
                brute += 1;
            }
        }
        let fast = e2s(symplectic_complement_size(dm, &g.generators))?;
        let expected = d.pow((n + k) as u32);
        ensure(brute == expected && fast == expected, || {
            format!("subgroup {i}: brute {brute}, fast {fast}, d^(n+k) {expected}")
        })?;
        let rho = DensityOperator::from_matrix_unchecked(dm, m).unwrap();
        let ms = e2s(mean_state(&e2s(char_function(&rho))?, DIRECT_TOL))?;
        let lib = e2s(symmetry_count(&ms))?;
        ensure(lib.fast == expected && lib.dense == Some(expected), || {
            format!("subgroup {i}: library count {lib:?}")
        })?;
    }
    Ok("50 subgroups".into())
}

/// Mean-state entropy is k log d and canonicalization gives the product form.
fn criterion_4() -> Outcome {
    let mut worst_s = 0.0f64;
    let mut worst_c = 0.0f64;
    for (i, g) in subgroup_corpus().iter().enumerate() {
        let dm = g.dims;
        let k = dm.n - g.rank();
        let m = DensityOperator::from_matrix_unchecked(dm, dense_mean_from_group(g)).unwrap();
        let eig = hermitian_eigenvalues(m.matrix());
        let s: f64 = eig.iter().filter(|&&l| l > 1e-14).map(|&l| -l * l.ln()).sum();
        let ds = (s - k as f64 * (dm.d as f64).ln()).abs();
        worst_s = worst_s.max(ds);
        ensure(ds < 1e-9, || format!("subgroup {i}: |S - k log d| = {ds:e}"))?;
        let lib_s = e2s(von_neumann_entropy(&m))?;
        ensure((lib_s - s).abs() < 1e-9, || format!("subgroup {i}: library entropy {lib_s}"))?;
        let u = e2s(canonicalize(g))?;
        let conj = e2s(apply(&u, &m))?;
        let dev = max_entry(&(conj.matrix() - canonical_target(dm.n, dm.d, k)));
        worst_c = worst_c.max(dev);
        ensure(dev < 1e-9, || format!("subgroup {i}: canonical form deviation {dev:e}"))?;
    }
    Ok(format!("max |S - k log d| {worst_s:.1e}, max canonical deviation {worst_c:.1e}"))
}

/// The five convolution property suites.
fn criterion_5() -> Outcome {
    let mut parts = Vec::new();
    for suite in Suite::ALL {
        let r = e2s(verify::run(suite, 5))?;
        ensure(r.passed, || {
            format!("{}: {} of {} cases failed, worst {:e}", suite.name(), r.failures, r.cases, r.max_deviation)
        })?;
        parts.push(format!("{} {}/{} (worst {:.1e})", suite.name(), r.cases, r.cases, r.max_deviation));
    }
    Ok(parts.join("; "))
}

/// Entropy bound along the flow and the iteration estimate.
fn criterion_6() -> Outcome {
    // entropies are computed to about 1e-13; below that the inequality is numerical noise
    const FLOOR: f64 = 1e-12;
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut checks = 0;
    let mut landings = 0;
    for (n, d) in [(1usize, 7u32), (2, 7), (1, 2), (2, 2), (3, 2)] {
        let dm = dims(n, d);
        let conv = e2s(SelfConvolution::default_for(d))?;
        for i in 0..6 {
            let rho = match i % 3 {
                0 => {
                    let k = rng.random_range(1..=n);
                    e2s(psi_k(dm, k, &e2s(random_clifford_with(dm, 15, &mut rng))?))?
                }
                1 => random_pure(dm, &mut rng),
                _ => random_mixed(dm, 2, &mut rng),
            };
            let xi = e2s(char_function(&rho))?;
            let mg = magic_gap(&xi, DIRECT_TOL);
            let s_m = e2s(von_neumann_entropy(&e2s(e2s(mean_state(&xi, DIRECT_TOL))?.to_dense())?))?;
            let (_, trace) = e2s(iterate(&rho, conv, 6, Mode::Char))?;
            for r in &trace.records {
                let gap = (s_m - r.entropy).abs();
                let bound = entropy_bound(r.l, mg, s_m);
                ensure(gap <= bound + FLOOR, || {
                    format!("(d={d}, n={n}) case {i} L={}: |dS| {gap:e} > bound {bound:e}", r.l)
                })?;
                checks += 1;
            }
            if mg > 0.0 {
                let l = e2s(required_iterations(n, d, mg))?;
                let (_, t) = e2s(iterate(&rho, conv, l, Mode::Char))?;
                let s_l = t.records.last().map(|r| r.entropy).unwrap_or(0.0);
                ensure((s_m - s_l).abs() < 0.5 * (d as f64).ln(), || {
                    format!("(d={d}, n={n}) case {i}: flow at L={l} misses S(M) by {}", (s_m - s_l).abs())
                })?;
                landings += 1;
            }
        }
    }
    Ok(format!("{checks} bound checks, {landings} iteration-estimate landings"))
}

/// Qubit three-copy convolution: oracle gate, cross-path agreement, frozen key unitary.
fn criterion_7() -> Outcome {
    let q = dims(1, 2);
    let t = DensityOperator::maximally_mixed(q);
    let xi = e2s(char_function(&t))?;
    if !qubit_char_path_validated() {
        ensure(
            matches!(magicflow::convolution::convolve3_char(&xi, &xi, &xi), Err(Error::OracleGateClosed)),
            || "char path ran before the gate opened".into(),
        )?;
    }
    let worst = e2s(verify::qubit_cross_path(7, 50))?;
    ensure(worst < 1e-10, || format!("cross-path error {worst:e}"))?;
    let v = e2s(key_unitary_qubit(1))?;
    ensure(v.images() == [0, 5, 6, 3, 7, 2, 1, 4], || format!("key unitary images {:?}", v.images()))?;
    // the same product assembled from SUM gates: SUM(c, t) adds site c into site t
    let j = dims(3, 2);
    let gates = vec![Gate::sum(0, 1), Gate::sum(0, 2), Gate::sum(1, 0), Gate::sum(2, 0)];
    let circuit = e2s(CliffordCircuit::new(j, gates))?;
    let dev = max_entry(&(e2s(circuit.unitary())? - v.to_matrix()));
    ensure(dev < 1e-12, || format!("CNOT product differs by {dev:e}"))?;
    let v2 = e2s(key_unitary_qubit(2))?;
    // |100>|000>|000> on qubit pairs -> first qubits of all three systems set
    ensure(v2.apply(0b10_00_00) == 0b10_10_10, || "n = 2 layout".into())?;
    Ok(format!("50 triples, max error {worst:.1e}; key unitary frozen"))
}

/// Parameter arithmetic.
fn criterion_8() -> Outcome {
    ensure(matches!(find_params(3), Err(Error::NoNontrivialParams { d: 3 })), || "d=3".into())?;
    ensure(matches!(find_params(5), Err(Error::NoNontrivialParams { d: 5 })), || "d=5".into())?;
    let p7 = e2s(find_params(7))?;
    ensure(p7.iter().any(|p| (p.s, p.t) == (2, 2)), || format!("d=7 gave {p7:?}"))?;
    Ok(format!("d=7 params {:?}", p7.iter().map(|p| (p.s, p.t)).collect::<Vec<_>>()))
}

fn run_cli(dir: &Path, args: &[&str]) -> Result<Vec<u8>, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_magicflow"))
        .current_dir(dir)
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!("{args:?}: {}", String::from_utf8_lossy(&out.stderr)));
    }
    Ok(out.stdout)
}

/// Two runs of every command with the same seed give identical bytes.
fn criterion_9() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let circuit = magicflow::io::write_circuit(&e2s(random_clifford(dims(2, 7), 12, 9))?);
    std::fs::write(dir.path().join("c.json"), circuit).map_err(|e| e.to_string())?;
    let runs: Vec<(Vec<&str>, Vec<&str>)> = vec![
        (vec!["build-state", "--kind", "zeros", "--d", "7", "--n", "2", "--out", "zeros.json"], vec!["zeros.json"]),
        (vec!["build-state", "--kind", "psi-k", "--d", "2", "--n", "3", "--k", "2", "--seed", "7", "--out", "psi.json"], vec!["psi.json"]),
        (vec!["build-state", "--kind", "random", "--d", "7", "--n", "2", "--seed", "11", "--repr", "char", "--out", "rand.json"], vec!["rand.json"]),
        (vec!["build-state", "--kind", "stabilizer", "--circuit", "c.json", "--out", "stab.json"], vec!["stab.json"]),
        (vec!["run-cg", "--in", "rand.json", "--L", "4", "--out", "flow.json", "--trace", "flow.csv"], vec!["flow.json", "flow.csv"]),
        (vec!["run-cg", "--in", "psi.json", "--L", "3", "--mode", "dense"], vec![]),
        (vec!["classify", "--in", "psi.json"], vec![]),
        (vec!["classify", "--in", "rand.json", "--flow"], vec![]),
        (vec!["verify", "all", "--seed", "3"], vec![]),
        (vec!["report", "--in", "rand.json"], vec![]),
    ];
    let mut first = Vec::new();
    for (args, files) in &runs {
        let mut bytes = run_cli(dir.path(), args)?;
        for f in files {
            bytes.extend(std::fs::read(dir.path().join(f)).map_err(|e| e.to_string())?);
        }
        first.push(bytes);
    }
    for ((args, files), before) in runs.iter().zip(&first) {
        let mut bytes = run_cli(dir.path(), args)?;
        for f in files {
            bytes.extend(std::fs::read(dir.path().join(f)).map_err(|e| e.to_string())?);
        }
        ensure(&bytes == before, || format!("{} output changed between runs", args[0]))?;
    }
    Ok(format!("{} command invocations reproduced byte for byte", runs.len()))
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("1 magic-class family classification", criterion_1),
        ("2 Clifford invariance of the class", criterion_2),
        ("3 symmetry count d^(n+k)", criterion_3),
        ("4 entropy k log d and canonical form", criterion_4),
        ("5 convolution property suites", criterion_5),
        ("6 entropy bound and iteration estimate", criterion_6),
        ("7 qubit three-copy convolution", criterion_7),
        ("8 parameter arithmetic", criterion_8),
        ("9 CLI determinism", criterion_9),
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (name, f) in criteria {
        let start = Instant::now();
        let outcome = panic::catch_unwind(AssertUnwindSafe(f))
            .unwrap_or_else(|p| Err(format!("panicked: {:?}", p.downcast_ref::<String>().map(String::as_str).or(p.downcast_ref::<&str>().copied()))));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS criterion {name}: {detail} [{secs:.1}s]"),
            Err(detail) => {
                failed += 1;
                println!("FAIL criterion {name}: {detail} [{secs:.1}s]");
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
