use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use cellfree_idd::cli::{format_csv, load_config, unix_now, write_text, Resolved, RunManifest};
use cellfree_idd::harness::{Sweep, SweepOptions};
use cellfree_idd::Error;

/// BER/FER sweeps of soft-feedback detectors with iterative detection and
/// decoding over LDPC-coded cell-free massive MIMO uplinks.
#[derive(Debug, Parser)]
#[command(name = "cfidd", version, args_override_self = true)]
struct Args {
    /// Config file of `key = value` lines.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Detectors to run: mmse, sic, pic, mf-sic, mf-pic (and ml with --uncoded).
    #[arg(long, value_name = "NAME[,NAME...]")]
    detector: Option<String>,
    /// SNR grid in dB, as START:STEP:END or a comma-separated list.
    #[arg(long, value_name = "LIST|START:STEP:END", allow_hyphen_values = true)]
    snr: Option<String>,
    /// Detection/decoding passes; every pass count up to N is reported.
    #[arg(long, value_name = "N")]
    idd: Option<String>,
    #[arg(long, value_name = "N")]
    realizations: Option<String>,
    #[arg(long, value_name = "N")]
    seed: Option<String>,
    /// Number of access points.
    #[arg(long = "l", value_name = "N")]
    aps: Option<String>,
    /// Number of users.
    #[arg(long = "k", value_name = "N")]
    users: Option<String>,
    /// Hard detection of uncoded symbols (reports SER in the fer column).
    #[arg(long)]
    uncoded: bool,
    /// SIC detection order: natural or norm.
    #[arg(long, value_name = "ORDER")]
    order: Option<String>,
    /// Worker threads (0 uses every core).
    #[arg(long, value_name = "N")]
    workers: Option<String>,
    /// Any config key, e.g. --set channel.shadowing_db=6.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// CSV output path; standard output when absent.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Run manifest path; defaults to OUT.manifest.json when --out is given.
    #[arg(long, value_name = "PATH")]
    manifest: Option<PathBuf>,
    /// Print the resolved config and exit.
    #[arg(long)]
    print_config: bool,
    /// No progress output.
    #[arg(long, short)]
    quiet: bool,
}

impl Args {
    fn overrides(&self) -> Result<Vec<(String, String)>, Error> {
        let mut out = Vec::new();
        let mut bad = Vec::new();
        for item in &self.set {
            match item.split_once('=') {
                Some((k, v)) => out.push((k.trim().to_string(), v.trim().to_string())),
                None => bad.push(format!("--set {item}: expected KEY=VALUE")),
            }
        }
        let named = [
            ("detect.detectors", &self.detector),
            ("sim.snr_db", &self.snr),
            ("idd.iterations", &self.idd),
            ("sim.realizations", &self.realizations),
            ("sim.seed", &self.seed),
            ("channel.aps", &self.aps),
            ("channel.ues", &self.users),
            ("detect.order", &self.order),
            ("sim.workers", &self.workers),
        ];
        for (key, value) in named {
            if let Some(v) = value {
                out.push((key.to_string(), v.clone()));
            }
        }
        if self.uncoded {
            out.push(("sim.uncoded".to_string(), "true".to_string()));
        }
        if bad.is_empty() {
            Ok(out)
        } else {
            Err(Error::Config(bad))
        }
    }
}

fn resolve(args: &Args) -> Result<Resolved, Error> {
    load_config(args.config.as_deref(), &args.overrides()?)
}

fn run(args: &Args, resolved: &Resolved) -> Result<bool, Error> {
    let started = unix_now();
    let sweep = Sweep::new(resolved.config.clone())?;
    let quiet = args.quiet;
    let progress = move |done: usize, total: usize| {
        if !quiet && (done == total || done.is_multiple_of((total / 100).max(1))) {
            eprint!("\r{done}/{total} realizations");
            if done == total {
                eprintln!();
            }
        }
    };
    let report = sweep.run(&SweepOptions { keep_realizations: false, progress: Some(&progress) })?;
    let csv = format_csv(&report.records)?;
    match &args.out {
        Some(path) => write_text(path, &csv)?,
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(csv.as_bytes())
                .map_err(|source| Error::Io { path: PathBuf::from("<stdout>"), source })?;
        }
    }
    let manifest_path = args.manifest.clone().or_else(|| {
        args.out.as_ref().map(|p| {
            let mut s = p.clone().into_os_string();
            s.push(".manifest.json");
            PathBuf::from(s)
        })
    });
    if let Some(path) = manifest_path {
        let m = RunManifest::new(resolved, &report.records, &report.failures, started, unix_now());
        write_text(&path, &m.to_json())?;
    }
    for f in &report.failures {
        eprintln!("cfidd: {f}");
    }
    Ok(report.failures.is_empty())
}

fn main() -> ExitCode {
    let args = Args::parse();
    let resolved = match resolve(&args) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("cfidd: {e}");
            return ExitCode::from(2);
        }
    };
    if args.print_config {
        print!("{}", cellfree_idd::cli::emit_config(&resolved.config));
        return ExitCode::SUCCESS;
    }
    match run(&args, &resolved) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(3),
        Err(e @ Error::Config(_)) => {
            eprintln!("cfidd: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("cfidd: {e}");
            ExitCode::from(3)
        }
    }
}
