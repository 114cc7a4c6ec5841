//! Command-line surface: `eval`, `classify`, `sweep`, `probe`.
//!
//! Exit codes: 0 success, 2 usage or parse error, 3 validation failure
//! (non-trace-preserving Kraus set, invalid density matrix, dimension
//! mismatch). Output is JSON or CSV, written to stdout or `--out`.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;

use crate::channels::{GalleryId, KrausChannel};
use crate::entropic::Wiretap;
use crate::optimize::{self, default_ensemble_size, OptConfig, Verdict};
use crate::orderings::{self, classify};
use crate::qmat::DensityMatrix;
use crate::{Error, Result};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_VALIDATION: i32 = 3;

/// Largest number of points a sweep grid may have.
pub const MAX_GRID_POINTS: usize = 200;

/// Columns of the sweep CSV, in order.
pub const SWEEP_COLUMNS: [&str; 6] = [
    "param",
    "q1",
    "cp1_lower",
    "degradable_residual",
    "more_capable_verdict",
    "less_noisy_verdict",
];

#[derive(Parser, Debug)]
#[command(name = "qcapacity", version, about = "Coherent and private information of quantum channels, and n=1 class probes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Entropies and coherent information at one input, plus Q1 and a Cp1 lower bound.
    Eval {
        #[command(flatten)]
        channel: ChannelArgs,
        /// Input state as JSON rows of [re, im] pairs; maximally mixed if omitted.
        #[arg(long)]
        rho: Option<PathBuf>,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Degradability checks, n=1 probes and capacities in one report.
    Classify {
        #[command(flatten)]
        channel: ChannelArgs,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Evaluate a one-parameter gallery family on a grid `start:stop:step`.
    Sweep {
        /// Gallery family: ad, dephasing, phase_flip, depolarizing, erasure.
        family: String,
        /// Grid `start:stop:step`, at most 200 points.
        grid: String,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Run a single probe.
    Probe {
        #[arg(value_enum)]
        kind: ProbeKind,
        #[command(flatten)]
        channel: ChannelArgs,
        #[command(flatten)]
        run: RunArgs,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ProbeKind {
    MoreCapable,
    LessNoisy,
    Concavity,
    Subadditivity,
    Degradable,
    ConjugateDegradable,
}

#[derive(Args, Debug)]
#[group(required = true, multiple = false)]
struct ChannelArgs {
    /// Gallery id `name:param1[,param2]`, e.g. `ad:0.3`.
    #[arg(long)]
    gallery: Option<String>,
    /// Channel-spec JSON file.
    #[arg(long)]
    channel: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Args, Debug)]
struct RunArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    restarts: Option<usize>,
    /// Named tolerance `key=value` (keys: tol, capacity, identity,
    /// degradable, nondegradable). Repeatable.
    #[arg(long = "tol", value_name = "KEY=VALUE")]
    tol: Vec<String>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Accept Kraus sets that are not trace preserving.
    #[arg(long)]
    no_validate: bool,
}

/// Resolved run configuration.
#[derive(Clone, Debug, Serialize)]
pub struct RunConfig {
    pub seed: u64,
    pub restarts: usize,
    pub tolerances: BTreeMap<String, f64>,
    pub format: Format,
    pub out: Option<PathBuf>,
    pub validate: bool,
}

impl Serialize for Format {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(match self {
            Format::Json => "json",
            Format::Csv => "csv",
        })
    }
}

impl RunConfig {
    fn from_args(a: &RunArgs, default_format: Format) -> Result<Self> {
        let mut tolerances = BTreeMap::new();
        for t in &a.tol {
            let (k, v) = match t.split_once('=') {
                Some((k, v)) => (k.trim().to_string(), v.trim()),
                None => ("tol".to_string(), t.trim()),
            };
            let v: f64 = v
                .parse()
                .map_err(|_| Error::Parse(format!("bad tolerance value in {t:?}")))?;
            tolerances.insert(k, v);
        }
        let cfg = Self {
            seed: a.seed,
            restarts: a.restarts.unwrap_or(OptConfig::default().restarts),
            tolerances,
            format: a.format.unwrap_or(default_format),
            out: a.out.clone(),
            validate: !a.no_validate,
        };
        cfg.opt_config()?;
        Ok(cfg)
    }

    pub fn opt_config(&self) -> Result<OptConfig> {
        if self.restarts == 0 {
            return Err(Error::Parse("--restarts must be at least 1".into()));
        }
        let mut cfg = OptConfig::default().with_seed(self.seed).with_restarts(self.restarts);
        for (k, v) in &self.tolerances {
            cfg.set_tolerance(k, *v).map_err(|e| Error::Parse(e.to_string()))?;
        }
        Ok(cfg)
    }
}

/// Map an error to its exit code.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Parse(_) | Error::UnknownChannel(_) | Error::InvalidParameter(_) | Error::Io(_) => EXIT_USAGE,
        _ => EXIT_VALIDATION,
    }
}

/// Parse a grid `start:stop:step` into its points.
pub fn parse_grid(s: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 3 {
        return Err(Error::Parse(format!("grid {s:?} is not start:stop:step")));
    }
    let nums: Vec<f64> = parts
        .iter()
        .map(|p| {
            p.trim()
                .parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| Error::Parse(format!("bad number {p:?} in grid {s:?}")))
        })
        .collect::<Result<_>>()?;
    let (start, stop, step) = (nums[0], nums[1], nums[2]);
    if !(step > 0.0) {
        return Err(Error::Parse(format!("grid step must be positive in {s:?}")));
    }
    if stop < start {
        return Err(Error::Parse(format!("grid {s:?} is empty")));
    }
    let span = (stop - start) / step;
    if span > MAX_GRID_POINTS as f64 {
        return Err(Error::Parse(format!("grid {s:?} exceeds {MAX_GRID_POINTS} points")));
    }
    let n = (span + 1e-9).floor() as usize + 1;
    if n > MAX_GRID_POINTS {
        return Err(Error::Parse(format!("grid {s:?} exceeds {MAX_GRID_POINTS} points")));
    }
    Ok((0..n)
        .map(|i| {
            let x = start + i as f64 * step;
            (x * 1e12).round() / 1e12
        })
        .collect())
}

fn load_channel(args: &ChannelArgs, validate: bool) -> Result<(String, KrausChannel)> {
    if let Some(g) = &args.gallery {
        let id: GalleryId = g.parse()?;
        return Ok((id.to_string(), id.build()?));
    }
    let path = args.channel.as_ref().expect("clap enforces one channel source");
    let text = std::fs::read_to_string(path)?;
    let ch = KrausChannel::from_json(&text, validate)?;
    Ok((path.display().to_string(), ch))
}

#[derive(Serialize)]
struct EvalReport {
    channel: String,
    dim_in: usize,
    dim_out: usize,
    dim_env: usize,
    input: String,
    entropy_b: f64,
    entropy_e: f64,
    coherent_information: f64,
    q1: f64,
    cp1_lower: f64,
    converged: bool,
}

impl EvalReport {
    fn csv(&self) -> String {
        format!(
            "channel,dim_in,dim_out,dim_env,input,entropy_b,entropy_e,coherent_information,q1,cp1_lower,converged\n{},{},{},{},{},{},{},{},{},{},{}\n",
            csv_field(&self.channel),
            self.dim_in,
            self.dim_out,
            self.dim_env,
            csv_field(&self.input),
            num(self.entropy_b),
            num(self.entropy_e),
            num(self.coherent_information),
            num(self.q1),
            num(self.cp1_lower),
            self.converged
        )
    }
}

/// Shortest round-trip decimal, switching to exponent form for very small
/// or very large magnitudes.
pub fn num(x: f64) -> String {
    if x == 0.0 || !x.is_finite() || (1e-4..1e6).contains(&x.abs()) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn cmd_eval(args: &ChannelArgs, rho: Option<&PathBuf>, run: &RunConfig) -> Result<String> {
    let cfg = run.opt_config()?;
    let (id, ch) = load_channel(args, run.validate)?;
    let (input, rho) = match rho {
        Some(p) => (p.display().to_string(), DensityMatrix::from_json(&std::fs::read_to_string(p)?)?),
        None => ("maximally_mixed".to_string(), DensityMatrix::maximally_mixed(ch.dim_in())),
    };
    let wt = Wiretap::new(&ch);
    let (hb, he) = wt.output_entropies(&rho)?;
    let q1 = optimize::max_coherent_information(&ch, &cfg);
    let cp1 = optimize::max_private_information_from(
        &ch,
        default_ensemble_size(&ch, &cfg),
        &cfg,
        q1.state().expect("state"),
    );
    let report = EvalReport {
        channel: id,
        dim_in: ch.dim_in(),
        dim_out: ch.dim_out(),
        dim_env: ch.dim_env(),
        input,
        entropy_b: hb,
        entropy_e: he,
        coherent_information: hb - he,
        q1: q1.value,
        cp1_lower: cp1.value,
        converged: q1.converged && cp1.converged,
    };
    Ok(match run.format {
        Format::Json => to_json(&report),
        Format::Csv => report.csv(),
    })
}

fn cmd_classify(args: &ChannelArgs, run: &RunConfig) -> Result<String> {
    let cfg = run.opt_config()?;
    let (id, ch) = load_channel(args, run.validate)?;
    let report = classify(&id, &ch, &cfg);
    Ok(match run.format {
        Format::Json => to_json(&report),
        Format::Csv => format!(
            "channel,q1,cp1_lower,degradable_residual,degradable_verdict,conjugate_degradable_residual,conjugate_degradable_verdict,more_capable_verdict,less_noisy_verdict,consistent\n{},{},{},{},{},{},{},{},{},{}\n",
            csv_field(&report.channel),
            num(report.q1),
            num(report.cp1_lower),
            num(report.degradable.residual),
            report.degradable.verdict,
            num(report.conjugate_degradable.residual),
            report.conjugate_degradable.verdict,
            report.more_capable_n1.verdict,
            report.less_noisy_n1.probe.verdict,
            report.is_consistent()
        ),
    })
}

/// One row of a sweep.
#[derive(Clone, Debug, Serialize)]
pub struct SweepRow {
    pub param: f64,
    pub q1: f64,
    pub cp1_lower: f64,
    pub degradable_residual: f64,
    pub more_capable_verdict: Verdict,
    pub less_noisy_verdict: Verdict,
}

/// Evaluate `family` at every grid point. Points run in parallel; rows come
/// back in grid order.
pub fn sweep(family: &str, grid: &[f64], cfg: &OptConfig) -> Result<Vec<SweepRow>> {
    let channels: Vec<(f64, KrausChannel)> = grid
        .iter()
        .map(|&p| Ok((p, GalleryId { name: family.to_string(), params: vec![p] }.build()?)))
        .collect::<Result<_>>()?;
    Ok(channels
        .par_iter()
        .map(|(p, ch)| sweep_point(*p, ch, cfg))
        .collect())
}

fn sweep_point(param: f64, ch: &KrausChannel, cfg: &OptConfig) -> SweepRow {
    let q1 = optimize::max_coherent_information(ch, cfg);
    let cp1 = optimize::max_private_information_from(
        ch,
        default_ensemble_size(ch, cfg),
        cfg,
        q1.state().expect("state"),
    );
    let degradable = orderings::check_degradable(ch, cfg);
    let mc = optimize::probe_more_capable(ch, cfg);
    let seeds: Vec<_> = mc.witness.iter().cloned().collect();
    let ln = optimize::probe_less_noisy_with(ch, cfg, &seeds);
    SweepRow {
        param,
        q1: q1.value,
        cp1_lower: cp1.value,
        degradable_residual: degradable.residual,
        more_capable_verdict: mc.verdict,
        less_noisy_verdict: ln.probe.verdict,
    }
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = SWEEP_COLUMNS.join(",");
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            num(r.param),
            num(r.q1),
            num(r.cp1_lower),
            num(r.degradable_residual),
            r.more_capable_verdict,
            r.less_noisy_verdict
        ));
    }
    out
}

fn cmd_sweep(family: &str, grid: &str, run: &RunConfig) -> Result<String> {
    let cfg = run.opt_config()?;
    let points = parse_grid(grid)?;
    let rows = sweep(family, &points, &cfg)?;
    Ok(match run.format {
        Format::Csv => sweep_csv(&rows),
        Format::Json => to_json(&rows),
    })
}

#[derive(Serialize)]
struct ProbeReport<T: Serialize> {
    channel: String,
    probe: &'static str,
    result: T,
}

fn cmd_probe(kind: ProbeKind, args: &ChannelArgs, run: &RunConfig) -> Result<String> {
    let cfg = run.opt_config()?;
    let (channel, ch) = load_channel(args, run.validate)?;
    let json = match kind {
        ProbeKind::MoreCapable => to_json(&ProbeReport {
            channel,
            probe: "more_capable",
            result: optimize::probe_more_capable(&ch, &cfg),
        }),
        ProbeKind::LessNoisy => to_json(&ProbeReport {
            channel,
            probe: "less_noisy",
            result: optimize::probe_less_noisy(&ch, &cfg),
        }),
        ProbeKind::Concavity => to_json(&ProbeReport {
            channel,
            probe: "concavity",
            result: optimize::concavity_probe_tol(&ch, cfg.concavity_samples, cfg.seed, cfg.identity_tol),
        }),
        ProbeKind::Subadditivity => to_json(&ProbeReport {
            channel,
            probe: "subadditivity",
            result: optimize::subadditivity_probe(&ch, &cfg)?,
        }),
        ProbeKind::Degradable => to_json(&ProbeReport {
            channel,
            probe: "degradable",
            result: orderings::check_degradable(&ch, &cfg),
        }),
        ProbeKind::ConjugateDegradable => to_json(&ProbeReport {
            channel,
            probe: "conjugate_degradable",
            result: orderings::check_conjugate_degradable(&ch, &cfg),
        }),
    };
    if run.format == Format::Csv {
        return Err(Error::Parse("probe output is JSON only".into()));
    }
    Ok(json)
}

fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("report serializes");
    s.push('\n');
    s
}

fn execute(cmd: &Command) -> Result<(String, Option<PathBuf>)> {
    let (text, run) = match cmd {
        Command::Eval { channel, rho, run } => {
            let run = RunConfig::from_args(run, Format::Json)?;
            (cmd_eval(channel, rho.as_ref(), &run)?, run)
        }
        Command::Classify { channel, run } => {
            let run = RunConfig::from_args(run, Format::Json)?;
            (cmd_classify(channel, &run)?, run)
        }
        Command::Sweep { family, grid, run } => {
            let run = RunConfig::from_args(run, Format::Csv)?;
            (cmd_sweep(family, grid, &run)?, run)
        }
        Command::Probe { kind, channel, run } => {
            let run = RunConfig::from_args(run, Format::Json)?;
            (cmd_probe(*kind, channel, &run)?, run)
        }
    };
    Ok((text, run.out))
}

/// Run the CLI on `args` (including the program name) and return the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match execute(&cli.command) {
        Ok((text, None)) => {
            let mut stdout = std::io::stdout().lock();
            if stdout.write_all(text.as_bytes()).is_err() {
                return EXIT_USAGE;
            }
            EXIT_OK
        }
        Ok((text, Some(path))) => match std::fs::write(&path, text) {
            Ok(()) => EXIT_OK,
            Err(e) => {
                eprintln!("error: cannot write {}: {e}", path.display());
                EXIT_USAGE
            }
        },
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
