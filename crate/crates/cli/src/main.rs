//! `sufbsp`: build, verify and benchmark suffix arrays.

use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use sufbsp_core::parsa::{bsp_suffix_array_with, ParOptions, RoundMetrics};
use sufbsp_core::{
    dc_suffix_array, naive_suffix_array, verify_suffix_array, BspConfig, SlackPolicy, SuffixArray,
    Text32, VSchedule,
};

#[derive(Parser)]
#[command(
    name = "sufbsp",
    version,
    about = "Difference-cover suffix arrays on a simulated BSP machine"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Build the suffix array of a file.
    Build(BuildArgs),
    /// Check a suffix array file against its input.
    Verify(VerifyArgs),
    /// Run the parallel builder over a corpus and tabulate its costs.
    Bench(BenchArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Algorithm {
    SeqNaive,
    SeqDc,
    Bsp,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Slack {
    Enforce,
    Relaxed,
}

impl From<Slack> for SlackPolicy {
    fn from(s: Slack) -> Self {
        match s {
            Slack::Enforce => SlackPolicy::Enforce,
            Slack::Relaxed => SlackPolicy::Relaxed,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
enum Format {
    #[default]
    Bin,
    Text,
}

#[derive(Args)]
struct Machine {
    /// Inverse bandwidth.
    #[arg(long, default_value_t = 1.0)]
    g: f64,
    /// Barrier latency.
    #[arg(long, default_value_t = 100.0)]
    latency: f64,
}

#[derive(Args)]
struct BuildArgs {
    input: PathBuf,
    #[arg(long, value_enum, default_value = "seq-dc")]
    algorithm: Algorithm,
    /// fixed:V, accel or custom:V,V,..
    #[arg(long)]
    schedule: Option<VSchedule>,
    #[arg(long)]
    procs: Option<usize>,
    #[command(flatten)]
    machine: Machine,
    #[arg(long, value_enum)]
    slack: Option<Slack>,
    #[arg(long)]
    out: PathBuf,
    /// Cost report path; defaults to the output path plus `.report.json`.
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "bin")]
    format: Format,
}

#[derive(Args)]
struct VerifyArgs {
    input: PathBuf,
    sa: PathBuf,
    #[arg(long, value_enum, default_value = "bin")]
    format: Format,
}

#[derive(Args)]
struct BenchArgs {
    corpus: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "1,2,4")]
    procs: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "accel,fixed:3")]
    schedule: Vec<VSchedule>,
    #[command(flatten)]
    machine: Machine,
    #[arg(long, value_enum, default_value = "relaxed")]
    slack: Slack,
    /// CSV destination; stdout if absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// JSON destination.
    #[arg(long)]
    report: Option<PathBuf>,
}

enum Failure {
    Verify(String),
    Usage(String),
    Io(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Verify(_) => 1,
            Failure::Usage(_) => 2,
            Failure::Io(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Verify(m) | Failure::Usage(m) | Failure::Io(m) => m,
        }
    }
}

type Outcome = Result<(), Failure>;

fn io_err(path: &Path, e: io::Error) -> Failure {
    Failure::Io(format!("{}: {e}", path.display()))
}

fn read_text(path: &Path) -> Result<Text32, Failure> {
    let raw = fs::read(path).map_err(|e| io_err(path, e))?;
    Ok(Text32::encode_bytes(&raw))
}

fn write_sa(path: &Path, sa: &[usize], format: Format) -> Outcome {
    let file = fs::File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = BufWriter::new(file);
    let res = sa.iter().try_for_each(|&i| match format {
        Format::Bin => w.write_all(&(i as u64).to_le_bytes()),
        Format::Text => writeln!(w, "{i}"),
    });
    res.and_then(|_| w.flush()).map_err(|e| io_err(path, e))
}

fn read_sa(path: &Path, format: Format) -> Result<Vec<usize>, Failure> {
    let bytes = fs::read(path).map_err(|e| io_err(path, e))?;
    let malformed = |what: String| Failure::Io(format!("{}: {what}", path.display()));
    match format {
        Format::Bin => {
            if bytes.len() % 8 != 0 {
                return Err(malformed(format!(
                    "{} bytes is not a whole number of entries",
                    bytes.len()
                )));
            }
            Ok(bytes
                .chunks_exact(8)
                .map(|c| {
                    let v = u64::from_le_bytes(c.try_into().expect("chunk of 8"));
                    usize::try_from(v).unwrap_or(usize::MAX)
                })
                .collect())
        }
        Format::Text => {
            let s = String::from_utf8(bytes).map_err(|_| malformed("not UTF-8".into()))?;
            s.lines()
                .enumerate()
                .filter(|(_, l)| !l.trim().is_empty())
                .map(|(k, l)| {
                    l.trim()
                        .parse()
                        .map_err(|_| malformed(format!("line {}: bad index {l:?}", k + 1)))
                })
                .collect()
        }
    }
}

fn config(p: usize, m: &Machine) -> Result<BspConfig, Failure> {
    BspConfig::new(p, m.g, m.latency).map_err(|e| Failure::Usage(e.to_string()))
}

fn run_bsp(
    t: &Text32,
    cfg: &BspConfig,
    schedule: VSchedule,
    slack: Slack,
) -> Result<(SuffixArray, RoundMetrics), Failure> {
    let opts = ParOptions {
        policy: slack.into(),
        schedule,
        ..Default::default()
    };
    bsp_suffix_array_with(t, cfg, &opts).map_err(|e| Failure::Usage(e.to_string()))
}

fn report_json(metrics: &RoundMetrics, cfg: &BspConfig) -> serde_json::Value {
    let mut v = metrics.to_json();
    v["g"] = cfg.g.into();
    v["L"] = cfg.latency.into();
    v["cost"] = metrics.total.cost(cfg).into();
    v["warnings"] = metrics.warnings.clone().into();
    v
}

fn write_json(path: &Path, value: &impl Serialize) -> Outcome {
    let file = fs::File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, value)
        .map_err(io::Error::from)
        .and_then(|_| writeln!(w))
        .and_then(|_| w.flush())
        .map_err(|e| io_err(path, e))
}

fn build(a: BuildArgs) -> Outcome {
    if a.algorithm != Algorithm::Bsp {
        let stray = [
            (a.procs.is_some(), "--procs"),
            (a.slack.is_some(), "--slack"),
            (a.report.is_some(), "--report"),
        ];
        if let Some((_, flag)) = stray.iter().find(|(set, _)| *set) {
            return Err(Failure::Usage(format!(
                "{flag} only applies to --algorithm bsp"
            )));
        }
    }
    if a.algorithm == Algorithm::SeqNaive && a.schedule.is_some() {
        return Err(Failure::Usage(
            "--schedule does not apply to --algorithm seq-naive".into(),
        ));
    }
    let t = read_text(&a.input)?;
    let sa = match a.algorithm {
        Algorithm::SeqNaive => naive_suffix_array(&t),
        Algorithm::SeqDc => dc_suffix_array(&t, &a.schedule.unwrap_or_default()),
        Algorithm::Bsp => {
            let cfg = config(a.procs.unwrap_or(1), &a.machine)?;
            let schedule = a.schedule.clone().unwrap_or(VSchedule::Accelerated);
            let (sa, metrics) = run_bsp(&t, &cfg, schedule, a.slack.unwrap_or(Slack::Enforce))?;
            for w in &metrics.warnings {
                eprintln!("warning: {w}");
            }
            let report = a.report.clone().unwrap_or_else(|| {
                let mut s = a.out.clone().into_os_string();
                s.push(".report.json");
                s.into()
            });
            write_json(&report, &report_json(&metrics, &cfg))?;
            sa
        }
    };
    write_sa(&a.out, sa.as_slice(), a.format)
}

fn verify(a: VerifyArgs) -> Outcome {
    let t = read_text(&a.input)?;
    let sa = read_sa(&a.sa, a.format)?;
    verify_suffix_array(&t, &sa).map_err(|e| Failure::Verify(e.to_string()))?;
    println!("ok: {} entries", sa.len());
    Ok(())
}

#[derive(Serialize)]
struct BenchRow {
    file: String,
    n: usize,
    schedule: String,
    p: usize,
    rounds: usize,
    #[serde(rename = "S")]
    s: usize,
    #[serde(rename = "W")]
    w: u64,
    #[serde(rename = "H")]
    h: u64,
    cost: f64,
}

fn bench(a: BenchArgs) -> Outcome {
    if a.procs.is_empty() || a.schedule.is_empty() {
        return Err(Failure::Usage(
            "--procs and --schedule need at least one value".into(),
        ));
    }
    let mut files: Vec<PathBuf> = fs::read_dir(&a.corpus)
        .map_err(|e| io_err(&a.corpus, e))?
        .map(|e| e.map(|e| e.path()))
        .collect::<io::Result<_>>()
        .map_err(|e| io_err(&a.corpus, e))?;
    files.retain(|f| f.is_file());
    files.sort();

    let mut rows = Vec::new();
    for file in &files {
        let t = read_text(file)?;
        let name = file
            .file_name()
            .map_or_else(String::new, |s| s.to_string_lossy().into_owned());
        for schedule in &a.schedule {
            for &p in &a.procs {
                let cfg = config(p, &a.machine)?;
                if t.len() < p {
                    eprintln!("skipping {name} at p={p}: only {} characters", t.len());
                    continue;
                }
                let (_, m) = run_bsp(&t, &cfg, schedule.clone(), a.slack).map_err(|f| {
                    Failure::Usage(format!("{name} p={p} {schedule}: {}", f.message()))
                })?;
                rows.push(BenchRow {
                    file: name.clone(),
                    n: t.len(),
                    schedule: schedule.to_string(),
                    p,
                    rounds: m.rounds.len(),
                    s: m.total.supersteps(),
                    w: m.total.work(),
                    h: m.total.comm(),
                    cost: m.total.cost(&cfg),
                });
            }
        }
    }

    let sink: Box<dyn Write> = match &a.out {
        Some(path) => Box::new(fs::File::create(path).map_err(|e| io_err(path, e))?),
        None => Box::new(io::stdout().lock()),
    };
    let mut csv = csv::Writer::from_writer(sink);
    let csv_path = a.out.clone().unwrap_or_else(|| PathBuf::from("<stdout>"));
    for row in &rows {
        csv.serialize(row)
            .map_err(|e| Failure::Io(format!("{}: {e}", csv_path.display())))?;
    }
    csv.flush().map_err(|e| io_err(&csv_path, e))?;
    if let Some(path) = &a.report {
        write_json(path, &rows)?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(2)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let outcome = match cli.cmd {
        Cmd::Build(a) => build(a),
        Cmd::Verify(a) => verify(a),
        Cmd::Bench(a) => bench(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("sufbsp: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
