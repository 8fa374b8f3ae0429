use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use fmqkd_core::interferometer::truth_table;
use fmqkd_core::photon::{drift_series, run_scan, Detector};
use fmqkd_core::protocol::{eve_intercept_resend, run_session, EveStrategy, Protocol, Session};

use crate::config::{Format, Overrides, RunConfig};
use crate::output;
use crate::CliError;

const DEFAULT_SCAN_GATES: u64 = 10_000_000;
const DEFAULT_SESSION_GATES: u64 = 1_000_000;

#[derive(Debug, Parser)]
#[command(
    name = "fmqkd",
    version,
    about = "Phase-encoded, polarization-decoded QKD link simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Analytic states and detection percentages for all phase pairs.
    Table1(CommonArgs),
    /// Count rates against Bob's modulator voltage.
    Scan(ScanArgs),
    /// Extinction ratio against time under a linear phase drift.
    Extinction(DriftArgs),
    /// BB84 session: statistics, key and gate log.
    Bb84(SessionArgs),
    /// B92 session: statistics, key and gate log.
    B92(SessionArgs),
}

#[derive(Debug, Clone, Args)]
struct CommonArgs {
    /// Master seed for every random draw.
    #[arg(long)]
    seed: Option<u64>,
    /// Gates per session, or per voltage point for `scan`.
    #[arg(long, visible_alias = "gates-per-point")]
    gates: Option<u64>,
    /// Mean photon number per pulse.
    #[arg(long)]
    mu: Option<f64>,
    /// Modulator half-wave voltage in volts.
    #[arg(long)]
    vpi: Option<f64>,
    /// Dark count probability per ns of gate.
    #[arg(long)]
    dark_per_ns: Option<f64>,
    /// Gate width in ns.
    #[arg(long)]
    gate_ns: Option<f64>,
    /// Channel loss in dB.
    #[arg(long)]
    loss_db: Option<f64>,
    /// Detector efficiency; calibrated to 1750 signal counts/s when absent.
    #[arg(long)]
    efficiency: Option<f64>,
    /// Growth rate of the interferometer phase imbalance in rad/s.
    #[arg(long)]
    drift_rad_per_s: Option<f64>,
    /// Output format: csv or json.
    #[arg(long)]
    format: Option<Format>,
    /// Output file; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Key-value config file; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
}

impl CommonArgs {
    fn overrides(&self) -> Overrides {
        Overrides {
            seed: self.seed,
            gates: self.gates,
            mu: self.mu,
            vpi: self.vpi,
            dark_per_ns: self.dark_per_ns,
            gate_ns: self.gate_ns,
            loss_db: self.loss_db,
            efficiency: self.efficiency,
            drift_rad_per_s: self.drift_rad_per_s,
            format: self.format,
            out: self.out.clone(),
            ..Overrides::default()
        }
    }

    fn resolve(&self, extra: Overrides, default_gates: u64, default_format: Format) -> Result<RunConfig, CliError> {
        let file = match &self.config {
            Some(path) => Overrides::from_file(path)?,
            None => Overrides::default(),
        };
        RunConfig::resolve(extra.over(self.overrides()).over(file), default_gates, default_format)
    }
}

#[derive(Debug, Clone, Args)]
struct ScanArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long)]
    v_min: Option<f64>,
    #[arg(long)]
    v_max: Option<f64>,
    #[arg(long)]
    v_step: Option<f64>,
    /// Alice's modulator phase in radians, held fixed during the scan.
    #[arg(long)]
    phase_alice: Option<f64>,
}

#[derive(Debug, Clone, Args)]
struct DriftArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Length of the run in seconds.
    #[arg(long)]
    duration_s: Option<f64>,
    /// Width of each time bin in seconds.
    #[arg(long)]
    bin_s: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum EveArg {
    Random,
    Match,
    Opposite,
}

#[derive(Debug, Clone, Args)]
struct SessionArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Write Alice's sifted key as hex to this file.
    #[arg(long)]
    key_out: Option<PathBuf>,
    /// Write the per-gate CSV log to this file.
    #[arg(long)]
    log_out: Option<PathBuf>,
    /// Insert an intercept-resend eavesdropper (BB84 only).
    #[arg(long, value_enum)]
    eve: Option<EveArg>,
}

/// Parses `args` (program name first), runs the subcommand and returns the
/// process exit code. Results go to `stdout` unless `--out` is given;
/// diagnostics and summaries go to `stderr`.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(stdout, "{text}");
                    0
                }
                _ => {
                    let _ = write!(stderr, "{text}");
                    1
                }
            };
        }
    };
    match execute(cli.command, stdout, stderr) {
        Ok(()) => 0,
        // A closed downstream pipe (`| head`) is not a failure.
        Err(CliError::Io(e)) if e.kind() == std::io::ErrorKind::BrokenPipe => 0,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}

fn with_output(
    out: &Option<PathBuf>,
    stdout: &mut dyn Write,
    f: impl FnOnce(&mut dyn Write) -> std::io::Result<()>,
) -> Result<(), CliError> {
    match out {
        Some(path) => write_file(path, f),
        None => {
            f(stdout)?;
            stdout.flush()?;
            Ok(())
        }
    }
}

fn write_file(path: &Path, f: impl FnOnce(&mut dyn Write) -> std::io::Result<()>) -> Result<(), CliError> {
    let mut w = BufWriter::new(File::create(path)?);
    f(&mut w)?;
    w.flush()?;
    Ok(())
}

fn execute(command: Command, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<(), CliError> {
    match command {
        Command::Table1(common) => {
            let cfg = common.resolve(Overrides::default(), 1, Format::Csv)?;
            let rows = truth_table()?;
            with_output(&cfg.out, stdout, |w| output::write_truth_table(w, &rows, cfg.format))
        }
        Command::Scan(args) => {
            let extra = Overrides {
                v_min: args.v_min,
                v_max: args.v_max,
                v_step: args.v_step,
                phase_alice: args.phase_alice,
                ..Overrides::default()
            };
            let cfg = args.common.resolve(extra, DEFAULT_SCAN_GATES, Format::Csv)?;
            let scan = run_scan(&cfg.voltages(), cfg.phase_alice, &cfg.system, cfg.gates, cfg.seed)?;
            with_output(&cfg.out, stdout, |w| output::write_scan(w, &cfg, &scan))?;
            let (e1, e2) = (scan.extinction(Detector::D1)?, scan.extinction(Detector::D2)?);
            let _ = writeln!(
                stderr,
                "D2 max at {:.3} V, D1 max at {:.3} V, crossing at {} V; extinction D1 {:.2} dB raw / {:.2} dB dark-subtracted, D2 {:.2} dB raw / {:.2} dB dark-subtracted",
                scan.argmax_voltage(Detector::D2).unwrap_or(f64::NAN),
                scan.argmax_voltage(Detector::D1).unwrap_or(f64::NAN),
                scan.crossing_voltage(cfg.v_min, cfg.v_min + cfg.system.v_pi)
                    .map(|v| format!("{v:.3}"))
                    .unwrap_or_else(|| "n/a".into()),
                e1.raw_db,
                e1.dark_subtracted_db,
                e2.raw_db,
                e2.dark_subtracted_db
            );
            Ok(())
        }
        Command::Extinction(args) => {
            let extra = Overrides {
                duration_s: args.duration_s,
                bin_s: args.bin_s,
                ..Overrides::default()
            };
            let cfg = args.common.resolve(extra, 1, Format::Csv)?;
            let series = drift_series(cfg.duration_s, cfg.drift_rad_per_s, cfg.bin_s, &cfg.system, cfg.seed)?;
            with_output(&cfg.out, stdout, |w| output::write_drift(w, &cfg, &series))?;
            if let (Some(first), Some(last)) = (series.first(), series.last()) {
                let _ = writeln!(
                    stderr,
                    "{} bins; extinction {:.2} dB at t={:.0} s, {:.2} dB at t={:.0} s",
                    series.len(),
                    first.extinction_db,
                    first.time_s,
                    last.extinction_db,
                    last.time_s
                );
            }
            Ok(())
        }
        Command::Bb84(args) => session(Protocol::Bb84, args, stdout, stderr),
        Command::B92(args) => session(Protocol::B92, args, stdout, stderr),
    }
}

fn session(
    protocol: Protocol,
    args: SessionArgs,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> Result<(), CliError> {
    let cfg = args
        .common
        .resolve(Overrides::default(), DEFAULT_SESSION_GATES, Format::Json)?;
    if args.eve.is_some() && protocol != Protocol::Bb84 {
        return Err(CliError::Config("--eve is only supported for bb84".into()));
    }
    let system = &cfg.system;
    let mut session = run_session(protocol, cfg.gates, system, cfg.seed)?;
    if let Some(eve) = args.eve {
        let strategy = match eve {
            EveArg::Random => EveStrategy::Random,
            EveArg::Match => EveStrategy::MatchAlice,
            EveArg::Opposite => EveStrategy::OppositeAlice,
        };
        let records = eve_intercept_resend(&session.records, system, strategy, cfg.seed)?;
        session = Session::from_records(protocol, records);
    }
    let stats = output::StatsJson::new(&session, cfg.seed);
    with_output(&cfg.out, stdout, |w| output::write_stats(w, &stats, cfg.format))?;
    if let Some(path) = &args.key_out {
        write_file(path, |w| output::write_key(w, &cfg, &session))?;
    }
    if let Some(path) = &args.log_out {
        write_file(path, |w| output::write_session_log(w, &session))?;
    }
    let _ = writeln!(
        stderr,
        "{}: {} gates, {} clicks, {} sifted bits, qber {}",
        protocol.name(),
        stats.gates_total,
        stats.clicks_total,
        stats.sifted_length,
        stats.qber.map(|q| format!("{q:.5}")).unwrap_or_else(|| "n/a".into())
    );
    Ok(())
}
