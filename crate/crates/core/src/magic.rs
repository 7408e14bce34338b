//! Mean-state extraction and the magic-class classifiers.
//!
//! The mean state keeps the unit-modulus part of a characteristic function.
//! Its support is an isotropic subgroup `G` of size `d^(n-k)`; the class
//! index `k` is read off three ways (group size, count of commuting Weyl
//! operators, von Neumann entropy) and the three must agree.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::clifford::{apply, canonicalize};
use crate::convolution::{find_params, iterate_char, SelfConvolution};
use crate::error::{Error, Result};
use crate::operators::{
    char_function_unchecked, entropy_of_matrix, inverse_char, max_abs_diff, weyl_action, CMatrix,
    CharFunction, DensityOperator, Roots,
};
use crate::phase_space::{
    symplectic_complement_size, symplectic_reduce, Dims, EchelonBasis, IsotropicSubgroup,
};

/// Unit-modulus tolerance for tables computed exactly from a state.
pub const DIRECT_TOL: f64 = 1e-9;

/// Largest Hilbert dimension for which the dense mean state is realized.
pub const DENSE_MEAN_STATE_CAP: usize = 1024;

/// Work bound `d^(2n) * D^2` for the dense commutator count.
pub const DENSE_SYMMETRY_WORK_CAP: u64 = 100_000_000;

/// Purity threshold for pure-state class semantics.
pub const PURITY_TOL: f64 = 1e-8;

pub const REPORT_FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanState {
    pub group: IsotropicSubgroup,
    /// `(point index, Xi value)` over the whole group, sorted by index.
    support: Vec<(usize, Complex64)>,
}

impl MeanState {
    pub fn dims(&self) -> Dims {
        self.group.dims
    }

    pub fn support(&self) -> &[(usize, Complex64)] {
        &self.support
    }

    pub fn group_size(&self) -> u64 {
        self.group.size()
    }

    pub fn char_function(&self) -> CharFunction {
        let dims = self.dims();
        let mut values = vec![Complex64::new(0.0, 0.0); dims.num_points()];
        for &(i, v) in &self.support {
            values[i] = v;
        }
        CharFunction::from_values_unchecked(dims, values).expect("table has the right length")
    }

    /// `(1/d^n) sum_{x in G} Xi(x) w(x)`, refused above [`DENSE_MEAN_STATE_CAP`].
    pub fn to_dense(&self) -> Result<DensityOperator> {
        let dim = self.dims().hilbert_dim();
        if dim > DENSE_MEAN_STATE_CAP {
            return Err(Error::SizeCapExceeded {
                dim,
                cap: DENSE_MEAN_STATE_CAP,
            });
        }
        Ok(inverse_char(&self.char_function()))
    }
}

/// `M(rho)` from `Xi`: keeps `{x : |Xi(x)| >= 1 - tol}` and checks that this
/// set is a closed isotropic subgroup.
pub fn mean_state(xi: &CharFunction, tol: f64) -> Result<MeanState> {
    if !(tol > 0.0 && tol < 0.5) {
        return Err(Error::Unsupported(format!("tolerance {tol} outside (0, 0.5)")));
    }
    let dims = xi.dims();
    let support: Vec<(usize, Complex64)> = xi
        .values()
        .par_iter()
        .enumerate()
        .filter(|(_, v)| v.norm() >= 1.0 - tol)
        .map(|(i, v)| (i, *v))
        .collect();
    if support.first().map(|s| s.0) != Some(0) {
        return Err(Error::NotAGroup("origin is not in the support".into()));
    }
    let points: Vec<_> = support.iter().map(|&(i, _)| dims.point_at(i)).collect();
    let generators = symplectic_reduce(dims, &points)?;
    let rank = generators.len();
    let expected = (dims.d as u64).pow(rank as u32);
    if support.len() as u64 != expected {
        return Err(Error::NotAGroup(format!(
            "{} unit-modulus points, but their span has {expected}",
            support.len()
        )));
    }
    // size matches the span and every point lies in it, so support = span
    let mut basis = EchelonBasis::new(dims.d, 2 * dims.n);
    for g in &generators {
        basis.insert(&g.coords());
    }
    debug_assert!(points.iter().all(|x| basis.contains(&x.coords())));
    let phases = generators.iter().map(|g| xi.at(g)).collect();
    let group = IsotropicSubgroup::new(dims, generators, phases).map_err(|e| match e {
        Error::NotIsotropic => Error::NotAGroup("support is not isotropic".into()),
        other => other,
    })?;
    Ok(MeanState { group, support })
}

/// `k = n - log_d |G|`.
pub fn class_index(m: &MeanState) -> usize {
    m.dims().n - m.group.rank()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SymmetryCount {
    /// Symplectic count `d^(2n - rank G)`.
    pub fast: u64,
    /// Commutator count, present at desk scale.
    pub dense: Option<u64>,
}

fn dense_symmetry_feasible(dims: Dims) -> bool {
    let d2n = dims.num_points() as u64;
    let dd = (dims.hilbert_dim() as u64).pow(2);
    dims.hilbert_dim() <= DENSE_MEAN_STATE_CAP && d2n.saturating_mul(dd) <= DENSE_SYMMETRY_WORK_CAP
}

/// `max |[M, w(a)]|` entrywise, using the monomial structure of `w(a)`.
fn commutator_norm(dims: Dims, m: &CMatrix, a: usize, roots: &Roots) -> f64 {
    let x = dims.point_at(a);
    let h = dims.hilbert_dim();
    let action: Vec<(usize, Complex64)> = (0..h)
        .map(|j| {
            let (t, e) = weyl_action(dims, &x, j);
            (t, roots.zeta(e as i64))
        })
        .collect();
    // (M w)[r, j] = M[r, t_j] c_j ; (w M)[t_r, j] = c_r M[r, j]
    let mut worst = 0.0f64;
    let mut wm = CMatrix::zeros(h, h);
    for (r, &(t, c)) in action.iter().enumerate() {
        for j in 0..h {
            wm[(t, j)] = c * m[(r, j)];
        }
    }
    for r in 0..h {
        for (j, &(t, c)) in action.iter().enumerate() {
            worst = worst.max((m[(r, t)] * c - wm[(r, j)]).norm());
        }
    }
    worst
}

/// Number of Weyl operators commuting with `M`. The dense count runs when
/// `d^(2n) D^2` is within [`DENSE_SYMMETRY_WORK_CAP`]; disagreement is an error.
pub fn symmetry_count(m: &MeanState) -> Result<SymmetryCount> {
    let dims = m.dims();
    let fast = symplectic_complement_size(dims, &m.group.generators)?;
    if !dense_symmetry_feasible(dims) {
        return Ok(SymmetryCount { fast, dense: None });
    }
    let dense_m = m.to_dense()?;
    let roots = Roots::new(dims.d);
    let dense = (0..dims.num_points())
        .into_par_iter()
        .filter(|&a| commutator_norm(dims, dense_m.matrix(), a, &roots) < 1e-8)
        .count() as u64;
    if dense != fast {
        return Err(Error::SymmetryPathDisagreement { fast, dense });
    }
    Ok(SymmetryCount {
        fast,
        dense: Some(dense),
    })
}

/// `round(S(M) / log d)` with residual check; returns `(k, S)`.
pub fn entropy_class(m: &MeanState) -> Result<(usize, f64)> {
    let dense = m.to_dense()?;
    let s = entropy_of_matrix(dense.matrix())?;
    let ratio = s / (m.dims().d as f64).ln();
    let k = ratio.round();
    if (ratio - k).abs() > 1e-4 || k < 0.0 {
        return Err(Error::NonIntegerEntropy(ratio));
    }
    Ok((k as usize, s))
}

/// `1 - max{|Xi(x)| : tol < |Xi(x)| < 1 - tol}`, or 0 when that set is empty.
pub fn magic_gap(xi: &CharFunction, tol: f64) -> f64 {
    let max = xi
        .values()
        .iter()
        .map(|z| z.norm())
        .filter(|&r| r > tol && r < 1.0 - tol)
        .fold(None, |acc: Option<f64>, r| Some(acc.map_or(r, |a| a.max(r))));
    match max {
        Some(r) => (1.0 - r).clamp(0.0, 1.0),
        None => 0.0,
    }
}

/// `log[1 + (1 - MG)^(2^(L+1) - 2) e^(S_M)]`.
pub fn entropy_bound(l: usize, mg: f64, s_m: f64) -> f64 {
    let base = (1.0 - mg).clamp(0.0, 1.0);
    if base == 0.0 {
        return 0.0;
    }
    let exponent = 2f64.powi(l as i32 + 1) - 2.0;
    // (1 - MG)^e e^S computed in log space so large L underflows cleanly
    let log_term = exponent * base.ln() + s_m;
    log_term.exp().ln_1p()
}

/// Smallest `L >= 1` with `entropy_bound(L, MG, n log d) < log(d) / 2`.
pub fn required_iterations(n: usize, d: u32, mg: f64) -> Result<usize> {
    if mg.is_nan() || mg <= 0.0 {
        return Err(Error::ZeroMagicGap);
    }
    let ln_d = (d as f64).ln();
    let s = n as f64 * ln_d;
    (1..=1024)
        .find(|&l| entropy_bound(l, mg, s) < 0.5 * ln_d)
        .ok_or(Error::IterationSearch)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FlowOptions {
    /// Number of self-convolutions; `None` uses [`required_iterations`].
    pub steps: Option<usize>,
    /// Convolution; `None` uses the default for `d`.
    pub convolution: Option<SelfConvolution>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassifyOptions {
    /// Unit-modulus tolerance for direct classification.
    pub tol: f64,
    /// Classify the flow iterate instead of the input table.
    pub flow: Option<FlowOptions>,
}

impl Default for ClassifyOptions {
    fn default() -> Self {
        ClassifyOptions {
            tol: DIRECT_TOL,
            flow: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdicts {
    pub k_group: usize,
    pub k_symmetry: usize,
    pub k_entropy: Option<usize>,
    pub agree: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MagicClassReport {
    pub format_version: u32,
    pub d: u32,
    pub n: usize,
    pub k: usize,
    pub group_size: u64,
    pub symmetry_count: u64,
    pub symmetry_count_dense: Option<u64>,
    /// Literal number of commuting Weyl labels outside `G`: `d^(n+k) - d^(n-k)`.
    pub commuting_outside_group: u64,
    /// Number of cosets of `G` in its commutant: `d^(2k)`.
    pub commuting_cosets: u64,
    pub entropy: Option<f64>,
    pub magic_gap: f64,
    pub iterations_used: usize,
    pub convolution: Option<SelfConvolution>,
    pub purity: f64,
    pub pure: bool,
    pub note: Option<String>,
    pub verdicts: Verdicts,
}

impl MagicClassReport {
    pub fn summary(&self) -> String {
        let entropy = match self.entropy {
            Some(s) => format!("{:.6}", s / (self.d as f64).ln()),
            None => "n/a".into(),
        };
        format!(
            "d={} n={} k={} |G|={} symmetries={} S/log d={} MG={:.6} L={} verdicts={}{}",
            self.d,
            self.n,
            self.k,
            self.group_size,
            self.symmetry_count,
            entropy,
            self.magic_gap,
            self.iterations_used,
            if self.verdicts.agree { "agree" } else { "DISAGREE" },
            if self.pure { "" } else { " (mixed input)" }
        )
    }
}

fn int_log(d: u32, value: u64) -> Option<usize> {
    let mut acc = 1u64;
    for e in 0..=64 {
        if acc == value {
            return Some(e);
        }
        acc = acc.checked_mul(d as u64)?;
    }
    None
}

/// Classification from the unit-modulus part of `Xi_rho` (or of a flow iterate).
pub fn classify(rho: &DensityOperator, options: &ClassifyOptions) -> Result<MagicClassReport> {
    rho.validate()?;
    let xi = char_function_unchecked(rho);
    classify_char(&xi, rho.purity(), options)
}

/// As [`classify`] but starting from a table; `purity` is recorded in the report.
pub fn classify_char(xi: &CharFunction, purity: f64, options: &ClassifyOptions) -> Result<MagicClassReport> {
    let dims = xi.dims();
    let mg = magic_gap(xi, options.tol);
    let (table, tol, iterations_used, convolution) = match options.flow {
        None => {
            let conv = match dims.d {
                2 => Some(SelfConvolution::QubitThreeCopy),
                d => find_params(d).ok().map(|p| SelfConvolution::with_params(p[0])),
            };
            (xi.clone(), options.tol, 0, conv)
        }
        Some(flow) => {
            let conv = match flow.convolution {
                Some(c) => c,
                None => SelfConvolution::default_for(dims.d)?,
            };
            let steps = match flow.steps {
                Some(l) => l,
                None if mg > 0.0 => required_iterations(dims.n, dims.d, mg)?,
                None => 1,
            };
            let iterate = iterate_char(xi, conv, steps)?;
            let tol = if mg > 0.0 { (0.5 * mg).min(0.49) } else { options.tol };
            (iterate, tol, steps, Some(conv))
        }
    };
    let m = mean_state(&table, tol)?;
    let k_group = class_index(&m);
    let sym = symmetry_count(&m)?;
    let k_symmetry = int_log(dims.d, sym.fast)
        .and_then(|e| e.checked_sub(dims.n))
        .ok_or_else(|| Error::NotAGroup(format!("symmetry count {} is not d^(n+k)", sym.fast)))?;
    let (k_entropy, entropy) = if dims.hilbert_dim() <= DENSE_MEAN_STATE_CAP {
        let (k, s) = entropy_class(&m)?;
        (Some(k), Some(s))
    } else {
        (None, None)
    };
    let agree = k_group == k_symmetry && k_entropy.is_none_or(|k| k == k_group);
    let d = dims.d as u64;
    let pure = purity > 1.0 - PURITY_TOL;
    let report = MagicClassReport {
        format_version: REPORT_FORMAT_VERSION,
        d: dims.d,
        n: dims.n,
        k: k_group,
        group_size: m.group_size(),
        symmetry_count: sym.fast,
        symmetry_count_dense: sym.dense,
        commuting_outside_group: sym.fast - m.group_size(),
        commuting_cosets: d.pow(2 * k_group as u32),
        entropy,
        magic_gap: mg,
        iterations_used,
        convolution,
        purity,
        pure,
        note: (!pure).then(|| "class semantics are defined for pure states only".to_string()),
        verdicts: Verdicts {
            k_group,
            k_symmetry,
            k_entropy,
            agree,
        },
    };
    if !agree {
        return Err(Error::VerdictDisagreement(Box::new(report)));
    }
    Ok(report)
}

/// Whether two pure states have Clifford-equivalent mean states.
pub fn same_cg_class(psi: &DensityOperator, phi: &DensityOperator) -> Result<bool> {
    if psi.dims() != phi.dims() {
        return Err(Error::DimensionMismatch(format!(
            "{:?} vs {:?}",
            psi.dims(),
            phi.dims()
        )));
    }
    for s in [psi, phi] {
        s.validate()?;
        let p = s.purity();
        if p <= 1.0 - PURITY_TOL {
            return Err(Error::MixedState(p));
        }
    }
    let ma = mean_state(&char_function_unchecked(psi), DIRECT_TOL)?;
    let mb = mean_state(&char_function_unchecked(phi), DIRECT_TOL)?;
    if class_index(&ma) != class_index(&mb) {
        return Ok(false);
    }
    if psi.dims().hilbert_dim() <= DENSE_MEAN_STATE_CAP {
        let ca = apply(&canonicalize(&ma.group)?, &ma.to_dense()?)?;
        let cb = apply(&canonicalize(&mb.group)?, &mb.to_dense()?)?;
        if max_abs_diff(ca.matrix(), cb.matrix()) > 1e-9 {
            return Err(Error::Unsupported(
                "equal class indices but distinct canonical forms".into(),
            ));
        }
    }
    Ok(true)
}
