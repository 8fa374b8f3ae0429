//! Run configuration: defaults, an optional key-value file, then flags.
//!
//! The file holds one `key = value` pair per line, keys spelled like the
//! long flags without the leading dashes (`dark-per-ns = 3e-7`). Blank
//! lines and `#` comments are ignored. A flag given on the command line
//! wins over the file; the file wins over the built-in defaults.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use fmqkd_core::system::REFERENCE_NET_DETECTION;
use fmqkd_core::SystemConfig;
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(format!("unknown format '{other}' (expected csv or json)")),
        }
    }
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Format::Csv => "csv",
            Format::Json => "json",
        })
    }
}

/// Every setting that can come from a flag or the config file. `None`
/// means "not given at this layer".
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub gates: Option<u64>,
    pub mu: Option<f64>,
    pub vpi: Option<f64>,
    pub dark_per_ns: Option<f64>,
    pub gate_ns: Option<f64>,
    pub loss_db: Option<f64>,
    pub efficiency: Option<f64>,
    pub drift_rad_per_s: Option<f64>,
    pub format: Option<Format>,
    pub out: Option<PathBuf>,
    pub v_min: Option<f64>,
    pub v_max: Option<f64>,
    pub v_step: Option<f64>,
    pub phase_alice: Option<f64>,
    pub duration_s: Option<f64>,
    pub bin_s: Option<f64>,
}

impl Overrides {
    /// `self` wins wherever it has a value.
    pub fn over(self, lower: Overrides) -> Overrides {
        Overrides {
            seed: self.seed.or(lower.seed),
            gates: self.gates.or(lower.gates),
            mu: self.mu.or(lower.mu),
            vpi: self.vpi.or(lower.vpi),
            dark_per_ns: self.dark_per_ns.or(lower.dark_per_ns),
            gate_ns: self.gate_ns.or(lower.gate_ns),
            loss_db: self.loss_db.or(lower.loss_db),
            efficiency: self.efficiency.or(lower.efficiency),
            drift_rad_per_s: self.drift_rad_per_s.or(lower.drift_rad_per_s),
            format: self.format.or(lower.format),
            out: self.out.or(lower.out),
            v_min: self.v_min.or(lower.v_min),
            v_max: self.v_max.or(lower.v_max),
            v_step: self.v_step.or(lower.v_step),
            phase_alice: self.phase_alice.or(lower.phase_alice),
            duration_s: self.duration_s.or(lower.duration_s),
            bin_s: self.bin_s.or(lower.bin_s),
        }
    }

    pub fn parse_file_text(text: &str) -> Result<Overrides, CliError> {
        let mut seen = BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("config line {}: expected key = value", n + 1)))?;
            let key = key.trim().trim_start_matches("--").to_string();
            if seen.insert(key.clone(), value.trim().to_string()).is_some() {
                return Err(CliError::Config(format!(
                    "config line {}: duplicate key '{key}'",
                    n + 1
                )));
            }
        }
        let mut o = Overrides::default();
        for (key, value) in seen {
            let bad = |e: String| CliError::Config(format!("config key '{key}': {e}"));
            match key.as_str() {
                "seed" => o.seed = Some(parse(&value).map_err(bad)?),
                "gates" | "gates-per-point" => o.gates = Some(parse(&value).map_err(bad)?),
                "mu" => o.mu = Some(parse(&value).map_err(bad)?),
                "vpi" => o.vpi = Some(parse(&value).map_err(bad)?),
                "dark-per-ns" => o.dark_per_ns = Some(parse(&value).map_err(bad)?),
                "gate-ns" => o.gate_ns = Some(parse(&value).map_err(bad)?),
                "loss-db" => o.loss_db = Some(parse(&value).map_err(bad)?),
                "efficiency" => o.efficiency = Some(parse(&value).map_err(bad)?),
                "drift-rad-per-s" => o.drift_rad_per_s = Some(parse(&value).map_err(bad)?),
                "format" => o.format = Some(value.parse().map_err(bad)?),
                "out" => o.out = Some(PathBuf::from(value)),
                "v-min" => o.v_min = Some(parse(&value).map_err(bad)?),
                "v-max" => o.v_max = Some(parse(&value).map_err(bad)?),
                "v-step" => o.v_step = Some(parse(&value).map_err(bad)?),
                "phase-alice" => o.phase_alice = Some(parse(&value).map_err(bad)?),
                "duration-s" => o.duration_s = Some(parse(&value).map_err(bad)?),
                "bin-s" => o.bin_s = Some(parse(&value).map_err(bad)?),
                _ => return Err(CliError::Config(format!("unknown config key '{key}'"))),
            }
        }
        Ok(o)
    }

    pub fn from_file(path: &Path) -> Result<Overrides, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config file {}: {e}", path.display())))?;
        Self::parse_file_text(&text)
    }
}

fn parse<T: FromStr>(s: &str) -> Result<T, String>
where
    T::Err: fmt::Display,
{
    s.parse::<T>().map_err(|e| format!("cannot parse '{s}': {e}"))
}

/// Fully resolved settings for one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub system: SystemConfig,
    pub seed: u64,
    pub gates: u64,
    pub drift_rad_per_s: f64,
    pub format: Format,
    pub out: Option<PathBuf>,
    pub v_min: f64,
    pub v_max: f64,
    pub v_step: f64,
    pub phase_alice: f64,
    pub duration_s: f64,
    pub bin_s: f64,
}

impl RunConfig {
    /// Applies `o` on top of the reference experiment. `default_gates` is
    /// the subcommand's own default for `--gates`.
    pub fn resolve(o: Overrides, default_gates: u64, default_format: Format) -> Result<RunConfig, CliError> {
        let cfg_err = |e: fmqkd_core::Error| CliError::Config(e.to_string());
        let mut system = SystemConfig::reference().map_err(cfg_err)?;
        if let Some(mu) = o.mu {
            system.source.mean_photon_number = mu;
        }
        if let Some(vpi) = o.vpi {
            system.v_pi = vpi;
        }
        if let Some(d) = o.dark_per_ns {
            system.detector.dark_rate_per_ns = d;
        }
        if let Some(g) = o.gate_ns {
            system.detector.gate_width_ns = g;
        }
        if let Some(l) = o.loss_db {
            system.channel.loss_db = l;
        }
        system.validate().map_err(cfg_err)?;
        match o.efficiency {
            Some(eta) => system.detector.efficiency = eta,
            None => system.calibrate_efficiency(REFERENCE_NET_DETECTION).map_err(cfg_err)?,
        }
        system.validate().map_err(cfg_err)?;

        let gates = o.gates.unwrap_or(default_gates);
        if gates == 0 {
            return Err(CliError::Config(
                "precondition violated: --gates must be at least 1".into(),
            ));
        }
        let cfg = RunConfig {
            system,
            seed: o.seed.unwrap_or(0),
            gates,
            drift_rad_per_s: o.drift_rad_per_s.unwrap_or(0.0),
            format: o.format.unwrap_or(default_format),
            out: o.out,
            v_min: o.v_min.unwrap_or(0.0),
            v_max: o.v_max.unwrap_or(10.0),
            v_step: o.v_step.unwrap_or(0.1),
            phase_alice: o.phase_alice.unwrap_or(0.0),
            duration_s: o.duration_s.unwrap_or(4.0 * 3600.0),
            bin_s: o.bin_s.unwrap_or(300.0),
        };
        if !cfg.drift_rad_per_s.is_finite() || !cfg.phase_alice.is_finite() {
            return Err(CliError::Config("drift rate and Alice's phase must be finite".into()));
        }
        if !(cfg.v_step > 0.0) || !(cfg.v_max >= cfg.v_min) || !cfg.v_min.is_finite() || !cfg.v_max.is_finite() {
            return Err(CliError::Config(
                "voltage range needs v-step > 0 and v-max >= v-min".into(),
            ));
        }
        if !(cfg.duration_s > 0.0) || !(cfg.bin_s > 0.0) || !cfg.duration_s.is_finite() {
            return Err(CliError::Config("duration-s and bin-s must be positive".into()));
        }
        Ok(cfg)
    }

    /// Scan grid `v_min, v_min + step, ...` up to `v_max` inclusive.
    pub fn voltages(&self) -> Vec<f64> {
        let n = ((self.v_max - self.v_min) / self.v_step + 1e-9).floor() as usize;
        (0..=n).map(|i| self.v_min + i as f64 * self.v_step).collect()
    }

    /// Short digest of every physical and run parameter.
    pub fn hash(&self) -> String {
        let canonical = format!(
            "{:?}|gates={}|drift={:?}|v={:?},{:?},{:?}|phase={:?}|dur={:?},{:?}",
            self.system,
            self.gates,
            self.drift_rad_per_s,
            self.v_min,
            self.v_max,
            self.v_step,
            self.phase_alice,
            self.duration_s,
            self.bin_s
        );
        let digest = Sha256::digest(canonical.as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }

    /// One-line description for file headers.
    pub fn describe(&self) -> String {
        let s = &self.system;
        format!(
            "seed={} config={} vpi={} mu={} rep_rate={} dark_per_ns={} gate_ns={} loss_db={} efficiency={:.6} drift_rad_per_s={}",
            self.seed,
            self.hash(),
            s.v_pi,
            s.source.mean_photon_number,
            s.source.rep_rate,
            s.detector.dark_rate_per_ns,
            s.detector.gate_width_ns,
            s.channel.loss_db,
            s.detector.efficiency,
            self.drift_rad_per_s
        )
    }
}
