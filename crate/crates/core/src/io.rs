//! JSON state and circuit files.
//!
//! State file:
//! `{"format_version": 1, "d": 7, "n": 1, "repr": "dense" | "char", "data": [[re, im], ...]}`
//! with `data` row-major (`dense`, a `D x D` matrix) or indexed by phase
//! point (`char`, `d^(2n)` values).
//!
//! Circuit file:
//! `{"format_version": 1, "d": 7, "n": 2, "gates": [{"kind": "SUM", "targets": [0, 1]}, ...]}`
//! with kinds `FOURIER`, `PHASE`, `MULT` (field `a`), `SUM` and `WEYL`
//! (fields `p`, `q`).

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::clifford::{CliffordCircuit, Gate, GateKind};
use crate::error::{Error, Result};
use crate::operators::{char_function_unchecked, check_size_cap, inverse_char, CMatrix, CharFunction, DensityOperator};
use crate::phase_space::{Dims, PhasePoint};

pub const FORMAT_VERSION: u32 = 1;

/// Largest number of gates accepted from a circuit file.
pub const MAX_GATES: usize = 1 << 20;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Repr {
    Dense,
    Char,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StateFile {
    format_version: u32,
    d: u32,
    n: usize,
    repr: Repr,
    /// Seed of the generator that produced the state, if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    data: Vec<[f64; 2]>,
}

fn check_version(v: u32) -> Result<()> {
    if v != FORMAT_VERSION {
        return Err(Error::Format(format!(
            "format_version {v} (expected {FORMAT_VERSION})"
        )));
    }
    Ok(())
}

/// `Dims` with `d^n` guarded against overflow and the size cap.
pub fn checked_dims(n: usize, d: u32) -> Result<Dims> {
    let dims = Dims::new(n, d)?;
    let h = u32::try_from(n)
        .ok()
        .and_then(|n| (d as usize).checked_pow(n))
        .ok_or_else(|| Error::Format(format!("{d}^{n} overflows")))?;
    check_size_cap(h)?;
    h.checked_mul(h)
        .ok_or_else(|| Error::Format(format!("{d}^(2*{n}) overflows")))?;
    Ok(dims)
}

/// Parses and validates a state file; `char` tables are converted to the
/// dense state and checked for positivity.
pub fn parse_state(text: &str) -> Result<DensityOperator> {
    let file: StateFile = serde_json::from_str(text)?;
    check_version(file.format_version)?;
    let dims = checked_dims(file.n, file.d)?;
    let h = dims.hilbert_dim();
    if file.data.len() != h * h {
        return Err(Error::Format(format!(
            "expected {} entries, found {}",
            h * h,
            file.data.len()
        )));
    }
    // entries of a density matrix and of its char table have modulus <= 1
    if file.data.iter().any(|&[re, im]| {
        let r = re.hypot(im);
        r.is_nan() || r > 1.0 + 1e-9
    }) {
        return Err(Error::Format("entry is non-finite or exceeds 1 in modulus".into()));
    }
    let values: Vec<Complex64> = file.data.iter().map(|&[re, im]| Complex64::new(re, im)).collect();
    let rho = match file.repr {
        Repr::Dense => DensityOperator::new(dims, CMatrix::from_row_slice(h, h, &values))?,
        Repr::Char => {
            let xi = CharFunction::new(dims, values)?;
            let rho = inverse_char(&xi);
            rho.validate()?;
            rho
        }
    };
    Ok(rho)
}

pub fn write_state(rho: &DensityOperator, repr: Repr, seed: Option<u64>) -> String {
    let dims = rho.dims();
    let data: Vec<[f64; 2]> = match repr {
        Repr::Dense => {
            let m = rho.matrix();
            let h = dims.hilbert_dim();
            (0..h)
                .flat_map(|i| (0..h).map(move |j| [m[(i, j)].re, m[(i, j)].im]))
                .collect()
        }
        Repr::Char => char_function_unchecked(rho)
            .values()
            .iter()
            .map(|z| [z.re, z.im])
            .collect(),
    };
    let file = StateFile {
        format_version: FORMAT_VERSION,
        d: dims.d,
        n: dims.n,
        repr,
        seed,
        data,
    };
    serde_json::to_string(&file).expect("state file serializes")
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GateSpec {
    kind: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    targets: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    a: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    p: Option<Vec<u32>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    q: Option<Vec<u32>>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CircuitFile {
    format_version: u32,
    d: u32,
    n: usize,
    gates: Vec<GateSpec>,
}

fn gate_from_spec(spec: GateSpec, dims: Dims) -> Result<Gate> {
    let no_extra = |g: &GateSpec, allow_a: bool, allow_pq: bool| -> Result<()> {
        if (!allow_a && g.a.is_some()) || (!allow_pq && (g.p.is_some() || g.q.is_some())) {
            return Err(Error::Format(format!("unexpected field on {} gate", g.kind)));
        }
        Ok(())
    };
    let kind = match spec.kind.as_str() {
        "FOURIER" => {
            no_extra(&spec, false, false)?;
            GateKind::Fourier
        }
        "PHASE" => {
            no_extra(&spec, false, false)?;
            GateKind::Phase
        }
        "SUM" => {
            no_extra(&spec, false, false)?;
            GateKind::Sum
        }
        "MULT" => {
            no_extra(&spec, true, false)?;
            GateKind::Mult(spec.a.ok_or_else(|| Error::Format("MULT needs a".into()))?)
        }
        "WEYL" => {
            no_extra(&spec, false, true)?;
            let (p, q) = match (spec.p.clone(), spec.q.clone()) {
                (Some(p), Some(q)) => (p, q),
                _ => return Err(Error::Format("WEYL needs p and q".into())),
            };
            if p.len() != dims.n || q.len() != dims.n {
                return Err(Error::Format(format!("WEYL label needs {} entries", dims.n)));
            }
            GateKind::Weyl(PhasePoint::new(dims.d, p, q)?)
        }
        other => return Err(Error::Format(format!("unknown gate kind {other:?}"))),
    };
    Ok(Gate {
        kind,
        targets: spec.targets,
    })
}

/// Parses and validates a circuit file.
pub fn parse_circuit(text: &str) -> Result<CliffordCircuit> {
    let file: CircuitFile = serde_json::from_str(text)?;
    check_version(file.format_version)?;
    let dims = Dims::new(file.n, file.d)?;
    if file.gates.len() > MAX_GATES {
        return Err(Error::Format(format!("more than {MAX_GATES} gates")));
    }
    let gates = file
        .gates
        .into_iter()
        .map(|g| gate_from_spec(g, dims))
        .collect::<Result<Vec<_>>>()?;
    CliffordCircuit::new(dims, gates)
}

pub fn write_circuit(circuit: &CliffordCircuit) -> String {
    let gates = circuit
        .gates
        .iter()
        .map(|g| {
            let mut spec = GateSpec {
                kind: String::new(),
                targets: g.targets.clone(),
                a: None,
                p: None,
                q: None,
            };
            spec.kind = match &g.kind {
                GateKind::Fourier => "FOURIER".into(),
                GateKind::Phase => "PHASE".into(),
                GateKind::Sum => "SUM".into(),
                GateKind::Mult(a) => {
                    spec.a = Some(*a);
                    "MULT".into()
                }
                GateKind::Weyl(x) => {
                    spec.p = Some(x.p.clone());
                    spec.q = Some(x.q.clone());
                    "WEYL".into()
                }
            };
            spec
        })
        .collect();
    let file = CircuitFile {
        format_version: FORMAT_VERSION,
        d: circuit.dims.d,
        n: circuit.dims.n,
        gates,
    };
    serde_json::to_string(&file).expect("circuit file serializes")
}
