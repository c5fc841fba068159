use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use streamcode::channel::{
    enumerate_worst_cases, gilbert_elliott, is_admissible, random_admissible, violations,
    ErasureTrace, GilbertElliott, Violation,
};
use streamcode::formats::{
    read_matrix_file, read_messages, read_packet_trace, write_emissions, write_matrix_file,
    write_packet_trace,
};
use streamcode::scalar::ScalarCode;
use streamcode::stream::{
    apply_erasures, random_stream, score, Arrival, StreamDecoder, StreamEncoder, StreamReport,
};
use streamcode::verifier::{
    certify_parity_check, end_to_end, probe_smaller_fields, sweep, Certificate, EndToEndConfig,
    ProbeResult, PropertyReport, DEFAULT_TAU_CAP,
};
use streamcode::{build_parity_check, make_field, CodeParams, Error, ParityCheck};

#[derive(Parser, Debug)]
#[command(
    name = "streamcode",
    version,
    about = "Rate-optimal (a, b, tau) streaming codes"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build the parity-check matrix for (a, b, tau)
    Construct {
        #[command(flatten)]
        params: ParamArgs,
        /// Matrix file to write; stdout when omitted
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Certify the recovery properties of a code
    Verify(VerifyArgs),
    /// Run the stream codec over generated erasure traces
    Simulate(SimulateArgs),
    /// Encode message packets into a coded packet trace
    Encode {
        #[command(flatten)]
        code: CodeArgs,
        #[arg(short, long)]
        input: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
        /// Erasure trace (JSON) marking packets as lost
        #[arg(long)]
        erase: Option<PathBuf>,
    },
    /// Decode a coded packet trace
    Decode {
        #[command(flatten)]
        code: CodeArgs,
        #[arg(short, long)]
        input: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

#[derive(Args, Debug, Clone, Copy)]
struct ParamArgs {
    #[arg(short = 'a')]
    a: usize,
    #[arg(short = 'b')]
    b: usize,
    #[arg(long)]
    tau: usize,
    /// Base field size; defaults to the smallest prime power >= tau
    #[arg(long)]
    q: Option<u64>,
}

impl ParamArgs {
    fn params(&self) -> streamcode::Result<CodeParams> {
        match self.q {
            Some(q) => CodeParams::with_field_size(self.a, self.b, self.tau, q),
            None => CodeParams::new(self.a, self.b, self.tau),
        }
    }
}

/// A code given either by parameters or by a matrix file.
#[derive(Args, Debug, Clone)]
struct CodeArgs {
    #[arg(short = 'a', requires_all = ["b", "tau"])]
    a: Option<usize>,
    #[arg(short = 'b', requires_all = ["a", "tau"])]
    b: Option<usize>,
    #[arg(long, requires_all = ["a", "b"])]
    tau: Option<usize>,
    #[arg(long)]
    q: Option<u64>,
    /// Matrix file written by `construct`
    #[arg(long, conflicts_with_all = ["a", "b", "tau", "q"])]
    matrix: Option<PathBuf>,
}

impl CodeArgs {
    fn load(&self) -> anyhow::Result<ParityCheck> {
        if let Some(path) = &self.matrix {
            let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
            return read_matrix_file(BufReader::new(f))
                .with_context(|| format!("reading {}", path.display()));
        }
        let (Some(a), Some(b), Some(tau)) = (self.a, self.b, self.tau) else {
            return Err(Error::Parameter("give -a, -b and --tau, or --matrix".into()).into());
        };
        let params = ParamArgs {
            a,
            b,
            tau,
            q: self.q,
        }
        .params()?;
        Ok(build_parity_check(&params, &make_field(params.q)?)?)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    #[command(flatten)]
    code: CodeArgs,
    /// Also run the stream codec over worst cases and random traces of this length
    #[arg(long, value_name = "T")]
    e2e: Option<usize>,
    /// Number of random admissible traces for --e2e
    #[arg(long, default_value_t = 100)]
    seeds: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Certify every 1 <= a <= b <= tau <= MAXTAU instead of a single code
    #[arg(long, value_name = "MAXTAU", conflicts_with = "e2e")]
    sweep: Option<usize>,
    #[arg(long, default_value_t = DEFAULT_TAU_CAP)]
    max_tau: usize,
    /// Try the construction over fields smaller than tau (informational)
    #[arg(long)]
    probe: bool,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Mode {
    Worst,
    Random,
    Ge,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[command(flatten)]
    code: CodeArgs,
    #[arg(long, value_enum, default_value_t = Mode::Random)]
    mode: Mode,
    /// Trace length; worst-case mode defaults to n + tau, others to 200
    #[arg(long)]
    length: Option<usize>,
    /// Number of traces in random and ge modes
    #[arg(long, default_value_t = 100)]
    runs: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.05)]
    p_gb: f64,
    #[arg(long, default_value_t = 0.3)]
    p_bg: f64,
    #[arg(long, default_value_t = 0.0)]
    loss_good: f64,
    #[arg(long, default_value_t = 0.8)]
    loss_bad: f64,
    /// Write the coded packet trace of the first run here
    #[arg(long)]
    trace: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
}

enum Outcome {
    Pass,
    Fail,
}

fn create(path: &Path) -> anyhow::Result<BufWriter<File>> {
    let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn open(path: &Path) -> anyhow::Result<BufReader<File>> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    Ok(BufReader::new(f))
}

fn output(path: &Option<PathBuf>) -> anyhow::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(create(p)?),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn describe(params: &CodeParams) -> String {
    format!(
        "(a, b, tau) = ({}, {}, {}): n = {}, k = {}, rate = {}, field size q^2 = {}",
        params.a,
        params.b,
        params.tau,
        params.n(),
        params.k(),
        params.rate(),
        params.q * params.q
    )
}

fn cmd_construct(params: &ParamArgs, out: &Option<PathBuf>) -> anyhow::Result<Outcome> {
    let params = params.params()?;
    let pc = build_parity_check(&params, &make_field(params.q)?)?;
    let mut w = output(out)?;
    write_matrix_file(&pc, &mut w)?;
    writeln!(w)?;
    w.flush()?;
    if out.is_some() {
        println!("{}", describe(&params));
    } else {
        eprintln!("{}", describe(&params));
    }
    Ok(Outcome::Pass)
}

fn print_report(r: &PropertyReport) {
    let status = if r.passed { "pass" } else { "FAIL" };
    print!(
        "  {:<12} {status}  {:>7} cases  {:>8.3}s",
        format!("{:?}", r.property),
        r.cases,
        r.elapsed_secs
    );
    if let Some(w) = &r.witness {
        print!("  witness {}", serde_json::to_string(w).unwrap_or_default());
    }
    println!();
    if let Some(s) = &r.stream {
        println!(
            "  {:<12} messages {}  emitted {}  misses {}  mismatches {}  max delay {}",
            "",
            s.messages,
            s.emitted,
            s.misses.len(),
            s.mismatches.len(),
            s.max_delay
        );
    }
}

#[derive(Serialize)]
struct VerifyReport {
    certificate: Certificate,
    #[serde(skip_serializing_if = "Option::is_none")]
    end_to_end: Option<PropertyReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    probe: Option<Vec<ProbeResult>>,
}

fn cmd_verify(args: &VerifyArgs) -> anyhow::Result<Outcome> {
    if let Some(max_tau) = args.sweep {
        let certs = sweep(max_tau, args.max_tau)?;
        let ok = certs.iter().all(Certificate::passed);
        match args.format {
            Format::Json => println!("{}", serde_json::to_string_pretty(&certs)?),
            Format::Text => {
                for c in &certs {
                    let p = c.params;
                    let status = if c.passed() { "pass" } else { "FAIL" };
                    let cases: u64 = c.reports.iter().map(|r| r.cases).sum();
                    println!(
                        "({}, {}, {}) q = {:<3} {status}  {cases} cases",
                        p.a, p.b, p.tau, p.q
                    );
                    for r in c.failures() {
                        print_report(r);
                    }
                }
                println!(
                    "{} of {} parameter points certified",
                    certs.iter().filter(|c| c.passed()).count(),
                    certs.len()
                );
            }
        }
        return Ok(if ok { Outcome::Pass } else { Outcome::Fail });
    }

    let pc = args.code.load()?;
    let params = pc.params;
    if params.tau > args.max_tau {
        return Err(Error::Parameter(format!(
            "tau = {} exceeds --max-tau {}",
            params.tau, args.max_tau
        ))
        .into());
    }
    let certificate = certify_parity_check(&pc);
    let end_to_end = match args.e2e {
        None => None,
        Some(len) => {
            let cfg = EndToEndConfig {
                horizon: params.n() + params.tau,
                random_traces: args.seeds,
                random_len: len,
                seed: args.seed,
            };
            Some(end_to_end(&Arc::new(ScalarCode::new(pc.clone())?), &cfg)?)
        }
    };
    let probe = if args.probe {
        Some(probe_smaller_fields(
            params.a, params.b, params.tau, 200, args.seed,
        )?)
    } else {
        None
    };
    let ok = certificate.passed() && end_to_end.as_ref().is_none_or(|r| r.passed);
    let report = VerifyReport {
        certificate,
        end_to_end,
        probe,
    };
    match args.format {
        Format::Json => println!("{}", serde_json::to_string_pretty(&report)?),
        Format::Text => {
            println!("{}", describe(&params));
            for r in report.certificate.reports.iter().chain(&report.end_to_end) {
                print_report(r);
            }
            for p in report.probe.iter().flatten() {
                println!(
                    "  probe q = {:<3} {}",
                    p.q,
                    serde_json::to_string(&p.outcome)?
                );
            }
            println!(
                "{}",
                if ok {
                    "all properties hold"
                } else {
                    "property failure"
                }
            );
        }
    }
    Ok(if ok { Outcome::Pass } else { Outcome::Fail })
}

#[derive(Serialize)]
struct MissLog {
    run: usize,
    t: u64,
    deadline: u64,
    /// A channel-rule violation overlapping `[t, deadline]`, if any.
    window: Option<Violation>,
}

#[derive(Serialize)]
struct SimReport {
    params: CodeParams,
    mode: Mode,
    runs: usize,
    inadmissible_runs: usize,
    messages: u64,
    emitted: u64,
    recovery_rate: f64,
    misses: usize,
    mismatches: usize,
    max_delay: u64,
    delay_histogram: BTreeMap<u64, u64>,
    miss_log: Vec<MissLog>,
}

fn cmd_simulate(args: &SimulateArgs) -> anyhow::Result<Outcome> {
    let pc = args.code.load()?;
    let params = pc.params;
    let code = Arc::new(ScalarCode::new(pc)?);
    let traces: Vec<ErasureTrace> = match args.mode {
        Mode::Worst => {
            let len = args.length.unwrap_or(params.n() + params.tau);
            enumerate_worst_cases(&params, len)?.collect()
        }
        Mode::Random => {
            let len = args.length.unwrap_or(200);
            (0..args.runs as u64)
                .map(|i| random_admissible(&params, len, args.seed.wrapping_add(i)))
                .collect()
        }
        Mode::Ge => {
            let len = args.length.unwrap_or(200);
            (0..args.runs as u64)
                .map(|i| {
                    let model = GilbertElliott {
                        p_good_to_bad: args.p_gb,
                        p_bad_to_good: args.p_bg,
                        loss_good: args.loss_good,
                        loss_bad: args.loss_bad,
                        seed: args.seed.wrapping_add(i),
                    };
                    gilbert_elliott(&model, len)
                })
                .collect::<streamcode::Result<_>>()?
        }
    };

    let mut total = StreamReport::default();
    let mut miss_log = Vec::new();
    let mut inadmissible = 0;
    for (i, trace) in traces.iter().enumerate() {
        let seed = args.seed.wrapping_add(i as u64);
        let (sent, packets) = random_stream(&code, trace.len() + params.tau, seed)?;
        let arrivals = apply_erasures(packets, trace);
        if i == 0 {
            if let Some(path) = &args.trace {
                let mut w = create(path)?;
                write_packet_trace(code.field(), &mut w, &arrivals)?;
                w.flush()?;
            }
        }
        let r = score(&code, &sent, &arrivals)?;
        if !is_admissible(trace, &params) {
            inadmissible += 1;
        }
        for m in &r.misses {
            let window = violations(trace, &params).find(|v| {
                let end = v.window_start + params.window() as i64 - 1;
                end >= m.t as i64 && v.window_start <= m.deadline as i64
            });
            miss_log.push(MissLog {
                run: i,
                t: m.t,
                deadline: m.deadline,
                window,
            });
        }
        total.merge(&r);
    }

    let report = SimReport {
        params,
        mode: args.mode,
        runs: traces.len(),
        inadmissible_runs: inadmissible,
        messages: total.messages,
        emitted: total.emitted,
        recovery_rate: if total.messages == 0 {
            1.0
        } else {
            total.emitted as f64 / total.messages as f64
        },
        misses: total.misses.len(),
        mismatches: total.mismatches.len(),
        max_delay: total.max_delay,
        delay_histogram: total.delays.clone(),
        miss_log,
    };
    match args.format {
        Format::Json => println!("{}", serde_json::to_string_pretty(&report)?),
        Format::Text => {
            println!("{}", describe(&params));
            let mode = serde_json::to_value(args.mode)?;
            println!(
                "mode {}, {} runs ({} inadmissible)",
                mode.as_str().unwrap_or("?"),
                report.runs,
                report.inadmissible_runs
            );
            println!(
                "recovered {} of {} messages ({:.4}), {} deadline misses, {} mismatches, max delay {}",
                report.emitted, report.messages, report.recovery_rate, report.misses, report.mismatches, report.max_delay
            );
            println!("delay histogram:");
            for (d, c) in &report.delay_histogram {
                println!("  {d:>3}: {c}");
            }
            for m in &report.miss_log {
                let window = match &m.window {
                    Some(v) => format!("window starting {} erased {:?}", v.window_start, v.erased),
                    None => "no violating window".to_string(),
                };
                println!(
                    "  miss: run {} t = {} deadline {} ({window})",
                    m.run, m.t, m.deadline
                );
            }
        }
    }
    let guaranteed = args.mode != Mode::Ge;
    let clean = report.misses == 0 && report.mismatches == 0;
    Ok(if guaranteed && !clean {
        Outcome::Fail
    } else {
        Outcome::Pass
    })
}

fn cmd_encode(
    code: &CodeArgs,
    input: &Path,
    out: &Option<PathBuf>,
    erase: &Option<PathBuf>,
) -> anyhow::Result<Outcome> {
    let pc = code.load()?;
    let k = pc.params.k();
    let code = Arc::new(ScalarCode::new(pc)?);
    let field = code.field().clone();
    let msgs = read_messages(&field, k, open(input)?)
        .with_context(|| format!("reading {}", input.display()))?;
    let erasures: ErasureTrace = match erase {
        Some(p) => serde_json::from_reader(open(p)?)
            .map_err(|e| Error::Format(format!("{}: {e}", p.display())))?,
        None => ErasureTrace::clean(0),
    };
    let mut enc = StreamEncoder::new(code);
    let packets = msgs
        .iter()
        .enumerate()
        .map(|(t, m)| enc.encode(t as u64, m))
        .collect::<streamcode::Result<Vec<_>>>()?;
    let mut w = output(out)?;
    write_packet_trace(&field, &mut w, &apply_erasures(packets, &erasures))?;
    w.flush()?;
    Ok(Outcome::Pass)
}

fn cmd_decode(code: &CodeArgs, input: &Path, out: &Option<PathBuf>) -> anyhow::Result<Outcome> {
    let pc = code.load()?;
    let n = pc.params.n();
    let code = Arc::new(ScalarCode::new(pc)?);
    let field = code.field().clone();
    let arrivals = read_packet_trace(&field, n, open(input)?)
        .with_context(|| format!("reading {}", input.display()))?;
    let mut dec = StreamDecoder::new(code);
    let mut emitted = Vec::new();
    let mut misses = Vec::new();
    for a in &arrivals {
        let out = dec.step(a)?;
        emitted.extend(out.emitted);
        misses.extend(out.misses);
    }
    let mut w = output(out)?;
    write_emissions(&field, &mut w, &emitted)?;
    w.flush()?;
    let erased = arrivals
        .iter()
        .filter(|a| matches!(a, Arrival::Erased(_)))
        .count();
    let max_delay = emitted.iter().map(|e| e.delay()).max().unwrap_or(0);
    eprintln!(
        "{} packets ({} erased): emitted {}, deadline misses {}, unresolved at end {}, max delay {}",
        arrivals.len(),
        erased,
        emitted.len(),
        misses.len(),
        dec.pending_times().len(),
        max_delay
    );
    for m in &misses {
        eprintln!("  miss: t = {} deadline {}", m.t, m.deadline);
    }
    Ok(if misses.is_empty() {
        Outcome::Pass
    } else {
        Outcome::Fail
    })
}

fn run(cli: &Cli) -> anyhow::Result<Outcome> {
    match &cli.command {
        Command::Construct { params, output } => cmd_construct(params, output),
        Command::Verify(args) => cmd_verify(args),
        Command::Simulate(args) => cmd_simulate(args),
        Command::Encode {
            code,
            input,
            output,
            erase,
        } => cmd_encode(code, input, output, erase),
        Command::Decode {
            code,
            input,
            output,
        } => cmd_decode(code, input, output),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(Outcome::Pass) => ExitCode::SUCCESS,
        Ok(Outcome::Fail) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            let failure = matches!(
                e.downcast_ref::<Error>(),
                Some(Error::Integrity(_) | Error::DeadlineMiss { .. })
            );
            ExitCode::from(if failure { 1 } else { 2 })
        }
    }
}
