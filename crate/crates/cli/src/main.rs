use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use magicflow::clifford::{prepare_stabilizer, random_clifford};
use magicflow::convolution::{iterate, ConvParams, Mode, SelfConvolution};
use magicflow::io::{self, Repr};
use magicflow::magic::{
    entropy_bound, magic_gap, mean_state, required_iterations, ClassifyOptions, FlowOptions,
    DIRECT_TOL,
};
use magicflow::operators::char_function_unchecked;
use magicflow::verify::{self, Suite};
use magicflow::{classify, DensityOperator, Error};

#[derive(Parser, Debug)]
#[command(name = "magicflow", version, about = "Magic classes of qudit states via the quantum convolution")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a state file.
    BuildState(BuildArgs),
    /// Run the self-convolution flow and write the final state and trace.
    RunCg(RunArgs),
    /// Classify a state; prints a JSON report.
    Classify(ClassifyArgs),
    /// Run a property suite; prints a JSON summary.
    Verify(VerifyArgs),
    /// One-line summary with magic gap, iteration estimate and bound table.
    Report(ReportArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Kind {
    Zeros,
    PsiK,
    Random,
    Stabilizer,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ReprArg {
    Dense,
    Char,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ModeArg {
    Dense,
    Char,
    Auto,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum SuiteArg {
    Duality,
    Stability,
    Clt,
    MaxEntropy,
    CliffordCovariance,
    All,
}

#[derive(clap::Args, Debug)]
struct BuildArgs {
    #[arg(long, value_enum)]
    kind: Kind,
    #[arg(long)]
    d: Option<u32>,
    #[arg(long)]
    n: Option<usize>,
    /// Number of magic sites for `psi-k`.
    #[arg(long)]
    k: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Depth of the random Clifford dressing.
    #[arg(long, default_value_t = 20)]
    depth: usize,
    /// Circuit file for `stabilizer`.
    #[arg(long)]
    circuit: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "dense")]
    repr: ReprArg,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(clap::Args, Debug)]
struct ConvArgs {
    #[arg(long, requires = "t")]
    s: Option<u32>,
    #[arg(long, requires = "s")]
    t: Option<u32>,
}

#[derive(clap::Args, Debug)]
struct RunArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long = "L", default_value_t = 1)]
    l: usize,
    #[command(flatten)]
    conv: ConvArgs,
    #[arg(long, value_enum, default_value = "auto")]
    mode: ModeArg,
    /// Final state file.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Trace CSV; stdout when absent.
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(clap::Args, Debug)]
struct ClassifyArgs {
    #[arg(long = "in")]
    input: PathBuf,
    /// Classify the flow iterate after this many steps instead of the input.
    #[arg(long = "L")]
    l: Option<usize>,
    /// Classify the flow iterate, with L from the iteration estimate unless given.
    #[arg(long)]
    flow: bool,
    #[command(flatten)]
    conv: ConvArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(clap::Args, Debug)]
struct VerifyArgs {
    #[arg(value_enum)]
    suite: SuiteArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(clap::Args, Debug)]
struct ReportArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Failure classes mapped to exit codes 1 (mathematical) and 2 (usage).
enum Failure {
    Math(String),
    Usage(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let msg = e.to_string();
        match e {
            Error::Io(_)
            | Error::Json(_)
            | Error::Format(_)
            | Error::InvalidModulus(_)
            | Error::NoSites
            | Error::InvalidParams { .. }
            | Error::NoNontrivialParams { .. }
            | Error::SiteOutOfRange { .. }
            | Error::NonInvertibleMultiplier { .. }
            | Error::SizeCapExceeded { .. }
            | Error::Unsupported(_)
            | Error::QubitOnly(_) => Failure::Usage(msg),
            _ => Failure::Math(msg),
        }
    }
}

type CmdResult = std::result::Result<bool, Failure>;

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

fn read(path: &Path) -> std::result::Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn emit(out: Option<&Path>, text: &str) -> std::result::Result<(), Failure> {
    match out {
        Some(p) => fs::write(p, text).map_err(|e| usage(format!("{}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn load_state(path: &Path) -> std::result::Result<DensityOperator, Failure> {
    Ok(io::parse_state(&read(path)?)?)
}

fn convolution_for(d: u32, conv: &ConvArgs) -> std::result::Result<SelfConvolution, Failure> {
    match (conv.s, conv.t) {
        (Some(s), Some(t)) => {
            if d == 2 {
                return Err(usage("--s/--t apply to odd d only; qubits use the three-copy convolution"));
            }
            Ok(SelfConvolution::with_params(ConvParams::new(s, t, d)?))
        }
        _ => Ok(SelfConvolution::default_for(d)?),
    }
}

fn build_state(args: BuildArgs) -> CmdResult {
    let repr = match args.repr {
        ReprArg::Dense => Repr::Dense,
        ReprArg::Char => Repr::Char,
    };
    let need = |v: Option<usize>, name: &str| v.ok_or_else(|| usage(format!("--{name} is required")));
    let (rho, seed) = match args.kind {
        Kind::Stabilizer => {
            let path = args.circuit.as_deref().ok_or_else(|| usage("--circuit is required"))?;
            let circuit = io::parse_circuit(&read(path)?)?;
            let dims = io::checked_dims(circuit.dims.n, circuit.dims.d)?;
            if args.d.is_some_and(|d| d != dims.d) || args.n.is_some_and(|n| n != dims.n) {
                return Err(usage("--d/--n disagree with the circuit file"));
            }
            (prepare_stabilizer(&circuit)?, None)
        }
        kind => {
            let d = args.d.ok_or_else(|| usage("--d is required"))?;
            let dims = io::checked_dims(need(args.n, "n")?, d)?;
            match kind {
                Kind::Zeros => (magicflow::states::zeros(dims), None),
                Kind::PsiK => {
                    let k = need(args.k, "k")?;
                    let dressing = random_clifford(dims, args.depth, args.seed)?;
                    (magicflow::states::psi_k(dims, k, &dressing)?, Some(args.seed))
                }
                Kind::Random => {
                    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
                    (magicflow::states::random_pure(dims, &mut rng), Some(args.seed))
                }
                Kind::Stabilizer => unreachable!(),
            }
        }
    };
    let mut text = io::write_state(&rho, repr, seed);
    text.push('\n');
    emit(args.out.as_deref(), &text)?;
    Ok(true)
}

fn run_cg(args: RunArgs) -> CmdResult {
    let rho = load_state(&args.input)?;
    let conv = convolution_for(rho.dims().d, &args.conv)?;
    let mode = match args.mode {
        ModeArg::Dense => Mode::Dense,
        ModeArg::Char => Mode::Char,
        ModeArg::Auto => Mode::Auto,
    };
    let (out, trace) = iterate(&rho, conv, args.l, mode)?;
    if trace.stalled() {
        eprintln!("warning: supnorm gap did not shrink over the last step");
    }
    emit(args.trace.as_deref(), &trace.to_csv())?;
    if let Some(path) = &args.out {
        let mut state = io::write_state(&out, Repr::Dense, None);
        state.push('\n');
        emit(Some(path), &state)?;
    }
    Ok(true)
}

fn pretty(value: &impl serde::Serialize) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report serializes");
    s.push('\n');
    s
}

fn classify_cmd(args: ClassifyArgs) -> CmdResult {
    let rho = load_state(&args.input)?;
    let d = rho.dims().d;
    let explicit = args.conv.s.is_some();
    let flow = if args.flow || args.l.is_some() || explicit {
        Some(FlowOptions {
            steps: args.l,
            convolution: Some(convolution_for(d, &args.conv)?),
        })
    } else {
        None
    };
    let options = ClassifyOptions {
        tol: DIRECT_TOL,
        flow,
    };
    match classify(&rho, &options) {
        Ok(report) => {
            emit(args.out.as_deref(), &pretty(&report))?;
            Ok(true)
        }
        Err(Error::VerdictDisagreement(report)) => {
            emit(args.out.as_deref(), &pretty(&*report))?;
            Ok(false)
        }
        Err(e) => Err(e.into()),
    }
}

#[derive(serde::Serialize)]
struct VerifySummary {
    format_version: u32,
    seed: u64,
    passed: bool,
    suites: Vec<verify::SuiteReport>,
}

fn verify_cmd(args: VerifyArgs) -> CmdResult {
    let suites: Vec<Suite> = match args.suite {
        SuiteArg::Duality => vec![Suite::Duality],
        SuiteArg::Stability => vec![Suite::Stability],
        SuiteArg::Clt => vec![Suite::Clt],
        SuiteArg::MaxEntropy => vec![Suite::MaxEntropy],
        SuiteArg::CliffordCovariance => vec![Suite::CliffordCovariance],
        SuiteArg::All => Suite::ALL.to_vec(),
    };
    let reports = suites
        .into_iter()
        .map(|s| verify::run(s, args.seed))
        .collect::<magicflow::Result<Vec<_>>>()?;
    let passed = reports.iter().all(|r| r.passed);
    let summary = VerifySummary {
        format_version: verify::SUITE_FORMAT_VERSION,
        seed: args.seed,
        passed,
        suites: reports,
    };
    emit(args.out.as_deref(), &pretty(&summary))?;
    Ok(passed)
}

fn report_cmd(args: ReportArgs) -> CmdResult {
    let rho = load_state(&args.input)?;
    let dims = rho.dims();
    let (summary, agree) = match classify(&rho, &ClassifyOptions::default()) {
        Ok(r) => (r.summary(), true),
        Err(Error::VerdictDisagreement(r)) => (r.summary(), false),
        Err(e) => return Err(e.into()),
    };
    let xi = char_function_unchecked(&rho);
    let mg = magic_gap(&xi, DIRECT_TOL);
    let m = mean_state(&xi, DIRECT_TOL)?;
    let s_m = (dims.n - m.group.rank()) as f64 * (dims.d as f64).ln();
    let mut text = format!("# format_version: 1\n{summary}\n");
    match required_iterations(dims.n, dims.d, mg) {
        Ok(l) => text.push_str(&format!("magic_gap={mg:.9} required_iterations={l}\n")),
        Err(_) => text.push_str(&format!("magic_gap={mg:.9} required_iterations=n/a (zero magic gap)\n")),
    }
    text.push_str("L,entropy_bound\n");
    for l in 1..=6 {
        text.push_str(&format!("{l},{:.9e}\n", entropy_bound(l, mg, s_m)));
    }
    emit(args.out.as_deref(), &text)?;
    Ok(agree)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::BuildState(a) => build_state(a),
        Command::RunCg(a) => run_cg(a),
        Command::Classify(a) => classify_cmd(a),
        Command::Verify(a) => verify_cmd(a),
        Command::Report(a) => report_cmd(a),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(Failure::Math(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
