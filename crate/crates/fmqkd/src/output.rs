//! File formats: truth table, scan and drift CSV/JSON, session statistics,
//! session log and key files.

use std::io::{self, Write};

use fmqkd_core::interferometer::TruthRow;
use fmqkd_core::photon::{DriftPoint, ScanResult};
use fmqkd_core::protocol::{b92_alice_bit, b92_bob_bit, bb84_alice_bit, bb84_bob_bit, Protocol, Session};
use serde::Serialize;

use crate::config::{Format, RunConfig};

/// Percentages are printed to six decimals; analytic cells are exact to
/// far better than that.
fn pct(p: f64) -> f64 {
    (p * 100.0 * 1e6).round() / 1e6 + 0.0
}

#[derive(Serialize)]
struct TruthJson<'a> {
    phi_pm1: &'a str,
    phi_pm2: &'a str,
    state: &'a str,
    bb84_d1_pct: f64,
    bb84_d2_pct: f64,
    b92_d_pct: Option<f64>,
}

pub fn write_truth_table(w: &mut dyn Write, rows: &[TruthRow], format: Format) -> io::Result<()> {
    match format {
        Format::Csv => {
            writeln!(w, "phi_pm1,phi_pm2,state,bb84_d1_pct,bb84_d2_pct,b92_d_pct")?;
            for r in rows {
                let b92 = r.b92_d.map(|p| format!("{}", pct(p))).unwrap_or_default();
                writeln!(
                    w,
                    "{},{},{},{},{},{}",
                    r.alice.label(),
                    r.bob.label(),
                    r.class,
                    pct(r.bb84_d1),
                    pct(r.bb84_d2),
                    b92
                )?;
            }
            Ok(())
        }
        Format::Json => {
            let rows: Vec<TruthJson> = rows
                .iter()
                .map(|r| TruthJson {
                    phi_pm1: r.alice.label(),
                    phi_pm2: r.bob.label(),
                    state: r.class.as_str(),
                    bb84_d1_pct: pct(r.bb84_d1),
                    bb84_d2_pct: pct(r.bb84_d2),
                    b92_d_pct: r.b92_d.map(pct),
                })
                .collect();
            serde_json::to_writer_pretty(&mut *w, &rows)?;
            writeln!(w)
        }
    }
}

#[derive(Serialize)]
struct ScanPointJson {
    voltage: f64,
    d1_counts: f64,
    d2_counts: f64,
    d1_signal: f64,
    d2_signal: f64,
}

#[derive(Serialize)]
struct ScanJson {
    seed: u64,
    config: String,
    duration_s: f64,
    points: Vec<ScanPointJson>,
}

/// Columns `voltage,d1_counts,d2_counts` in counts per second.
pub fn write_scan(w: &mut dyn Write, cfg: &RunConfig, scan: &ScanResult) -> io::Result<()> {
    match cfg.format {
        Format::Csv => {
            writeln!(
                w,
                "# fmqkd scan {} gates_per_point={} phase_alice={}",
                cfg.describe(),
                cfg.gates,
                cfg.phase_alice
            )?;
            writeln!(w, "voltage,d1_counts,d2_counts")?;
            for i in 0..scan.voltages.len() {
                writeln!(
                    w,
                    "{:.4},{:.3},{:.3}",
                    scan.voltages[i], scan.d1_counts[i], scan.d2_counts[i]
                )?;
            }
            Ok(())
        }
        Format::Json => {
            let points = (0..scan.voltages.len())
                .map(|i| ScanPointJson {
                    voltage: scan.voltages[i],
                    d1_counts: scan.d1_counts[i],
                    d2_counts: scan.d2_counts[i],
                    d1_signal: scan.d1_signal[i],
                    d2_signal: scan.d2_signal[i],
                })
                .collect();
            let doc = ScanJson {
                seed: cfg.seed,
                config: cfg.hash(),
                duration_s: scan.duration_s,
                points,
            };
            serde_json::to_writer_pretty(&mut *w, &doc)?;
            writeln!(w)
        }
    }
}

#[derive(Serialize)]
struct DriftJson {
    seed: u64,
    config: String,
    bin_s: f64,
    points: Vec<DriftPointJson>,
}

#[derive(Serialize)]
struct DriftPointJson {
    time_s: f64,
    drift_rad: f64,
    d1_counts: f64,
    d2_counts: f64,
    extinction_db: f64,
}

/// Columns `time_s,d1_counts,d2_counts,extinction_db`.
pub fn write_drift(w: &mut dyn Write, cfg: &RunConfig, series: &[DriftPoint]) -> io::Result<()> {
    match cfg.format {
        Format::Csv => {
            writeln!(
                w,
                "# fmqkd extinction {} duration_s={} bin_s={}",
                cfg.describe(),
                cfg.duration_s,
                cfg.bin_s
            )?;
            writeln!(w, "time_s,d1_counts,d2_counts,extinction_db")?;
            for p in series {
                writeln!(
                    w,
                    "{:.3},{:.3},{:.3},{:.4}",
                    p.time_s, p.d1_counts, p.d2_counts, p.extinction_db
                )?;
            }
            Ok(())
        }
        Format::Json => {
            let doc = DriftJson {
                seed: cfg.seed,
                config: cfg.hash(),
                bin_s: cfg.bin_s,
                points: series
                    .iter()
                    .map(|p| DriftPointJson {
                        time_s: p.time_s,
                        drift_rad: p.drift,
                        d1_counts: p.d1_counts,
                        d2_counts: p.d2_counts,
                        extinction_db: p.extinction_db,
                    })
                    .collect(),
            };
            serde_json::to_writer_pretty(&mut *w, &doc)?;
            writeln!(w)
        }
    }
}

/// Session statistics with fixed field names.
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct StatsJson {
    pub gates_total: u64,
    pub clicks_total: u64,
    pub double_clicks: u64,
    pub sifted_length: u64,
    pub sifted_fraction: f64,
    pub qber: Option<f64>,
    pub seed: u64,
}

impl StatsJson {
    pub fn new(session: &Session, seed: u64) -> Self {
        let s = &session.stats;
        StatsJson {
            gates_total: s.gates_total,
            clicks_total: s.clicks_total,
            double_clicks: s.double_clicks,
            sifted_length: s.sifted_length,
            sifted_fraction: s.sifted_fraction,
            qber: s.qber,
            seed,
        }
    }
}

pub fn write_stats(w: &mut dyn Write, stats: &StatsJson, format: Format) -> io::Result<()> {
    match format {
        Format::Json => {
            serde_json::to_writer_pretty(&mut *w, stats)?;
            writeln!(w)
        }
        Format::Csv => {
            writeln!(
                w,
                "gates_total,clicks_total,double_clicks,sifted_length,sifted_fraction,qber,seed"
            )?;
            let qber = stats.qber.map(|q| q.to_string()).unwrap_or_default();
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                stats.gates_total,
                stats.clicks_total,
                stats.double_clicks,
                stats.sifted_length,
                stats.sifted_fraction,
                qber,
                stats.seed
            )
        }
    }
}

/// Per-gate log. Bit columns are empty where the bit is undefined.
pub fn write_session_log(w: &mut dyn Write, session: &Session) -> io::Result<()> {
    writeln!(w, "index,alice_phase,bob_phase,d1,d2,kept,alice_bit,bob_bit")?;
    let mut kept = session.key.source_indices.iter().peekable();
    let bit = |b: Option<bool>| b.map(|b| if b { "1" } else { "0" }).unwrap_or("");
    for r in &session.records {
        let is_kept = kept.peek() == Some(&&r.index);
        if is_kept {
            kept.next();
        }
        let (alice, bob) = match session.protocol {
            Protocol::Bb84 => (
                Some(bb84_alice_bit(r.alice_phase)),
                r.outcome.single_click().map(bb84_bob_bit),
            ),
            Protocol::B92 => (
                b92_alice_bit(r.alice_phase),
                if r.outcome.d1_click {
                    b92_bob_bit(r.bob_phase)
                } else {
                    None
                },
            ),
        };
        writeln!(
            w,
            "{},{},{},{},{},{},{},{}",
            r.index,
            r.alice_phase.label(),
            r.bob_phase.label(),
            u8::from(r.outcome.d1_click),
            u8::from(r.outcome.d2_click),
            u8::from(is_kept),
            bit(alice),
            bit(bob)
        )?;
    }
    Ok(())
}

/// Packs bits MSB-first into lowercase hex; the last byte is zero-padded.
pub fn bits_to_hex(bits: &[bool]) -> String {
    bits.chunks(8)
        .map(|chunk| {
            let byte = chunk
                .iter()
                .enumerate()
                .fold(0u8, |acc, (i, &b)| acc | (u8::from(b) << (7 - i)));
            format!("{byte:02x}")
        })
        .collect()
}

/// Header line, then Alice's sifted key as hex.
pub fn write_key(w: &mut dyn Write, cfg: &RunConfig, session: &Session) -> io::Result<()> {
    writeln!(
        w,
        "# fmqkd key protocol={} seed={} config={} bits={}",
        session.protocol.name(),
        cfg.seed,
        cfg.hash(),
        session.key.len()
    )?;
    writeln!(w, "{}", bits_to_hex(&session.key.alice_bits))
}
