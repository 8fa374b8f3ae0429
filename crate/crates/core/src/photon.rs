//! Faint-pulse source and gated single-photon detectors.
//!
//! A gate emits a Poissonian number of photons. Each one independently
//! makes it through the link and is registered with probability
//! `transmission * efficiency`; if any does, the pulse is routed to D1 or D2
//! by the measurement-head probabilities (multi-photon pulses all take the
//! same route). Each detector also fires on its own with the per-gate dark
//! probability. Gates are independent: no dead time and no afterpulsing.

use alloc::vec::Vec;
use core::ops::{Add, AddAssign};

use rand::Rng;
use rand_distr::{Binomial, Distribution, Poisson};

use crate::error::{Error, Result};
use crate::interferometer::{bb84_probs, ModulatorSetting};
use crate::rng::{stream_rng, SimRng};
use crate::system::SystemConfig;

/// Tolerance on `p_d1 + p_d2 <= 1`.
pub const PROBABILITY_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SourceConfig {
    /// Mean photons per pulse after the attenuator.
    pub mean_photon_number: f64,
    /// Pulses per second.
    pub rep_rate: f64,
}

impl Default for SourceConfig {
    fn default() -> Self {
        Self {
            mean_photon_number: 0.1,
            rep_rate: 1e6,
        }
    }
}

impl SourceConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.mean_photon_number > 0.0) || !self.mean_photon_number.is_finite() {
            return Err(Error::InvalidArgument("mean photon number must be positive"));
        }
        if !(self.rep_rate > 0.0) || !self.rep_rate.is_finite() {
            return Err(Error::InvalidArgument("repetition rate must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorConfig {
    /// Probability that an incident photon is registered.
    pub efficiency: f64,
    /// Dark count probability per nanosecond of open gate.
    pub dark_rate_per_ns: f64,
    pub gate_width_ns: f64,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            efficiency: 1.0,
            dark_rate_per_ns: 3e-7,
            gate_width_ns: 100.0,
        }
    }
}

impl DetectorConfig {
    pub fn dark_prob_per_gate(&self) -> f64 {
        self.dark_rate_per_ns * self.gate_width_ns
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.efficiency) {
            return Err(Error::InvalidArgument("detector efficiency must lie in [0, 1]"));
        }
        if !(self.dark_rate_per_ns >= 0.0) || !(self.gate_width_ns > 0.0) || !self.gate_width_ns.is_finite() {
            return Err(Error::InvalidArgument("dark rate must be >= 0 and gate width > 0"));
        }
        if !(self.dark_prob_per_gate() <= 1.0) {
            return Err(Error::InvalidArgument("dark count probability per gate exceeds 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Detector {
    D1,
    D2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum ClickCause {
    #[default]
    None,
    Signal,
    Dark,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct GateOutcome {
    pub d1_click: bool,
    pub d2_click: bool,
    pub d1_cause: ClickCause,
    pub d2_cause: ClickCause,
    /// Some photon survived to the analyzer and would have been registered
    /// had the head routed it to a detector.
    pub signal_arrived: bool,
}

impl GateOutcome {
    pub fn any_click(&self) -> bool {
        self.d1_click || self.d2_click
    }

    pub fn double_click(&self) -> bool {
        self.d1_click && self.d2_click
    }

    /// The detector that fired, when exactly one did.
    pub fn single_click(&self) -> Option<Detector> {
        match (self.d1_click, self.d2_click) {
            (true, false) => Some(Detector::D1),
            (false, true) => Some(Detector::D2),
            _ => None,
        }
    }
}

fn check_routing(p_d1: f64, p_d2: f64) -> Result<(f64, f64)> {
    if !(0.0..=1.0 + PROBABILITY_SLACK).contains(&p_d1) || !(0.0..=1.0 + PROBABILITY_SLACK).contains(&p_d2) {
        return Err(Error::Precondition("detector probabilities must lie in [0, 1]"));
    }
    let sum = p_d1 + p_d2;
    if sum > 1.0 + PROBABILITY_SLACK {
        return Err(Error::Precondition("p_d1 + p_d2 must not exceed 1"));
    }
    Ok(if sum > 1.0 {
        (p_d1 / sum, p_d2 / sum)
    } else {
        (p_d1, p_d2)
    })
}

/// Per-gate physics for one source / link / detector combination.
#[derive(Debug, Clone)]
pub struct GateModel {
    photons: Poisson<f64>,
    mean_photons: f64,
    survival: f64,
    dark: f64,
}

impl GateModel {
    /// `transmission` is the fraction of source power that reaches the
    /// analyzer in the interfering slot.
    pub fn new(src: &SourceConfig, det: &DetectorConfig, transmission: f64) -> Result<Self> {
        src.validate()?;
        det.validate()?;
        if !(0.0..=1.0).contains(&transmission) {
            return Err(Error::InvalidArgument("transmission must lie in [0, 1]"));
        }
        let photons = Poisson::new(src.mean_photon_number)
            .map_err(|_| Error::InvalidArgument("mean photon number out of range"))?;
        Ok(Self {
            photons,
            mean_photons: src.mean_photon_number,
            survival: transmission * det.efficiency,
            dark: det.dark_prob_per_gate(),
        })
    }

    /// Probability that at least one photon of a pulse is registrable,
    /// `1 - exp(-mu * transmission * efficiency)`.
    pub fn arrival_probability(&self) -> f64 {
        -libm::expm1(-self.mean_photons * self.survival)
    }

    pub fn dark_probability(&self) -> f64 {
        self.dark
    }

    fn signal(&self, rng: &mut SimRng) -> bool {
        let n = self.photons.sample(rng);
        if n < 0.5 {
            return false;
        }
        let p = 1.0 - libm::pow(1.0 - self.survival, n);
        rng.random::<f64>() < p
    }

    /// One gate with both detectors live. Probabilities must already satisfy
    /// the routing precondition (see [`simulate_gate`]).
    pub fn sample(&self, p_d1: f64, p_d2: f64, rng: &mut SimRng) -> GateOutcome {
        let mut out = GateOutcome {
            signal_arrived: self.signal(rng),
            ..GateOutcome::default()
        };
        if out.signal_arrived {
            let u: f64 = rng.random();
            if u < p_d1 {
                out.d1_cause = ClickCause::Signal;
            } else if u < p_d1 + p_d2 {
                out.d2_cause = ClickCause::Signal;
            }
        }
        let dark1 = rng.random::<f64>() < self.dark;
        let dark2 = rng.random::<f64>() < self.dark;
        if out.d1_cause == ClickCause::None && dark1 {
            out.d1_cause = ClickCause::Dark;
        }
        if out.d2_cause == ClickCause::None && dark2 {
            out.d2_cause = ClickCause::Dark;
        }
        out.d1_click = out.d1_cause != ClickCause::None;
        out.d2_click = out.d2_cause != ClickCause::None;
        out
    }

    /// One gate of a single-detector head; only D1 exists and D2 never
    /// fires.
    pub fn sample_single(&self, p_d: f64, rng: &mut SimRng) -> GateOutcome {
        let mut out = GateOutcome {
            signal_arrived: self.signal(rng),
            ..GateOutcome::default()
        };
        if out.signal_arrived && rng.random::<f64>() < p_d {
            out.d1_cause = ClickCause::Signal;
        }
        if rng.random::<f64>() < self.dark && out.d1_cause == ClickCause::None {
            out.d1_cause = ClickCause::Dark;
        }
        out.d1_click = out.d1_cause != ClickCause::None;
        out
    }

    /// Gate-by-gate run of `n_gates` identical gates.
    pub fn run_gates(&self, p_d1: f64, p_d2: f64, n_gates: u64, rng: &mut SimRng) -> Result<CountTally> {
        let (p_d1, p_d2) = check_routing(p_d1, p_d2)?;
        let mut tally = CountTally::default();
        for _ in 0..n_gates {
            tally.record(&self.sample(p_d1, p_d2, rng));
        }
        Ok(tally)
    }

    /// Same distribution of per-detector totals as [`GateModel::run_gates`],
    /// drawn directly from binomials. Cost does not grow with `n_gates`.
    pub fn sample_counts(&self, p_d1: f64, p_d2: f64, n_gates: u64, rng: &mut SimRng) -> Result<CountTally> {
        let (p_d1, p_d2) = check_routing(p_d1, p_d2)?;
        let arrived = binomial(n_gates, self.arrival_probability(), rng)?;
        let d1_signal = binomial(arrived, p_d1, rng)?;
        let rest = if p_d1 < 1.0 {
            (p_d2 / (1.0 - p_d1)).min(1.0)
        } else {
            0.0
        };
        let d2_signal = binomial(arrived - d1_signal, rest, rng)?;
        let d1_dark = binomial(n_gates - d1_signal, self.dark, rng)?;
        let d2_dark = binomial(n_gates - d2_signal, self.dark, rng)?;
        Ok(CountTally {
            gates: n_gates,
            d1_clicks: d1_signal + d1_dark,
            d2_clicks: d2_signal + d2_dark,
            d1_signal,
            d2_signal,
        })
    }
}

fn binomial(n: u64, p: f64, rng: &mut SimRng) -> Result<u64> {
    if n == 0 || p <= 0.0 {
        return Ok(0);
    }
    Ok(Binomial::new(n, p.min(1.0))
        .map_err(|_| Error::InvalidArgument("binomial parameters out of range"))?
        .sample(rng))
}

/// Simulates one gate. Probabilities summing to slightly more than one
/// (within [`PROBABILITY_SLACK`]) are renormalized; a sum below one leaves
/// the remainder as photons lost in the analyzer.
pub fn simulate_gate(
    p_d1: f64,
    p_d2: f64,
    src: &SourceConfig,
    det: &DetectorConfig,
    transmission: f64,
    rng: &mut SimRng,
) -> Result<GateOutcome> {
    let (p_d1, p_d2) = check_routing(p_d1, p_d2)?;
    Ok(GateModel::new(src, det, transmission)?.sample(p_d1, p_d2, rng))
}

/// Click totals over a run of gates. Addition is associative, so partial
/// tallies from partitions can be merged in any grouping.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct CountTally {
    pub gates: u64,
    pub d1_clicks: u64,
    pub d2_clicks: u64,
    /// Clicks caused by signal light; the dark-subtracted counts.
    pub d1_signal: u64,
    pub d2_signal: u64,
}

impl CountTally {
    pub fn record(&mut self, g: &GateOutcome) {
        self.gates += 1;
        self.d1_clicks += g.d1_click as u64;
        self.d2_clicks += g.d2_click as u64;
        self.d1_signal += (g.d1_cause == ClickCause::Signal) as u64;
        self.d2_signal += (g.d2_cause == ClickCause::Signal) as u64;
    }
}

impl Add for CountTally {
    type Output = CountTally;

    fn add(self, o: CountTally) -> CountTally {
        CountTally {
            gates: self.gates + o.gates,
            d1_clicks: self.d1_clicks + o.d1_clicks,
            d2_clicks: self.d2_clicks + o.d2_clicks,
            d1_signal: self.d1_signal + o.d1_signal,
            d2_signal: self.d2_signal + o.d2_signal,
        }
    }
}

impl AddAssign for CountTally {
    fn add_assign(&mut self, o: CountTally) {
        *self = *self + o;
    }
}

/// Gate range handled by partition `index` of `partitions`.
pub fn partition_len(n_gates: u64, partitions: u64, index: u64) -> u64 {
    let base = n_gates / partitions;
    base + u64::from(index < n_gates % partitions)
}

/// Gate-by-gate run split into `partitions` pieces, each on its own stream
/// of `seed`. The result depends on the partition count but not on the
/// order the pieces run in.
pub fn run_partitioned(
    model: &GateModel,
    p_d1: f64,
    p_d2: f64,
    n_gates: u64,
    partitions: u64,
    seed: u64,
) -> Result<CountTally> {
    if partitions == 0 {
        return Err(Error::InvalidArgument("partition count must be at least 1"));
    }
    let mut total = CountTally::default();
    for index in 0..partitions {
        let mut rng = stream_rng(seed, index);
        total += model.run_gates(p_d1, p_d2, partition_len(n_gates, partitions, index), &mut rng)?;
    }
    Ok(total)
}

/// `10 log10(max / min)`.
pub fn extinction_db(max_rate: f64, min_rate: f64) -> Result<f64> {
    if !(min_rate > 0.0) {
        return Err(Error::InvalidArgument("minimum rate must be positive"));
    }
    if !(max_rate > 0.0) {
        return Err(Error::InvalidArgument("maximum rate must be positive"));
    }
    Ok(10.0 * libm::log10(max_rate / min_rate))
}

/// Extinction with the minimum floored at one count over `duration_s`, so
/// a run that saw nothing at the minimum still yields a (lower-bound)
/// number.
pub fn floored_extinction_db(max_rate: f64, min_rate: f64, duration_s: f64) -> Result<f64> {
    extinction_db(max_rate, min_rate.max(1.0 / duration_s))
}

/// Counts per second against Bob's modulator voltage.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanResult {
    pub voltages: Vec<f64>,
    pub d1_counts: Vec<f64>,
    pub d2_counts: Vec<f64>,
    /// Signal-only (dark-subtracted) rates.
    pub d1_signal: Vec<f64>,
    pub d2_signal: Vec<f64>,
    /// Simulated time per voltage point.
    pub duration_s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Extinction {
    pub raw_db: f64,
    /// From signal-only counts, floored at one count.
    pub dark_subtracted_db: f64,
}

impl ScanResult {
    fn series(&self, det: Detector) -> (&[f64], &[f64]) {
        match det {
            Detector::D1 => (&self.d1_counts, &self.d1_signal),
            Detector::D2 => (&self.d2_counts, &self.d2_signal),
        }
    }

    /// Voltage of the highest count rate on `det` (first one on ties).
    pub fn argmax_voltage(&self, det: Detector) -> Option<f64> {
        let (raw, _) = self.series(det);
        let mut best: Option<usize> = None;
        for (i, &r) in raw.iter().enumerate() {
            if best.is_none_or(|b| r > raw[b]) {
                best = Some(i);
            }
        }
        best.map(|i| self.voltages[i])
    }

    pub fn min_rate(&self, det: Detector) -> Option<f64> {
        self.series(det).0.iter().copied().reduce(f64::min)
    }

    pub fn max_rate(&self, det: Detector) -> Option<f64> {
        self.series(det).0.iter().copied().reduce(f64::max)
    }

    /// First voltage in `[lo, hi]` where `d1 - d2` changes sign, linearly
    /// interpolated between scan points.
    pub fn crossing_voltage(&self, lo: f64, hi: f64) -> Option<f64> {
        let idx: Vec<usize> = (0..self.voltages.len())
            .filter(|&i| self.voltages[i] >= lo && self.voltages[i] <= hi)
            .collect();
        idx.windows(2).find_map(|w| {
            let (a, b) = (w[0], w[1]);
            let da = self.d1_counts[a] - self.d2_counts[a];
            let db = self.d1_counts[b] - self.d2_counts[b];
            if da == 0.0 {
                Some(self.voltages[a])
            } else if da.signum() != db.signum() {
                let t = da / (da - db);
                Some(self.voltages[a] + t * (self.voltages[b] - self.voltages[a]))
            } else {
                None
            }
        })
    }

    pub fn extinction(&self, det: Detector) -> Result<Extinction> {
        let (raw, signal) = self.series(det);
        let empty = Error::InvalidArgument("scan has no points");
        let raw_max = raw.iter().copied().reduce(f64::max).ok_or(empty.clone())?;
        let raw_min = raw.iter().copied().reduce(f64::min).ok_or(empty.clone())?;
        let sig_max = signal.iter().copied().reduce(f64::max).ok_or(empty.clone())?;
        let sig_min = signal.iter().copied().reduce(f64::min).ok_or(empty)?;
        Ok(Extinction {
            raw_db: floored_extinction_db(raw_max, raw_min, self.duration_s)?,
            dark_subtracted_db: floored_extinction_db(sig_max, sig_min, self.duration_s)?,
        })
    }
}

/// Sweeps Bob's modulator voltage with Alice's phase held at
/// `base_phase_alice`, `gates_per_point` gates per voltage. Point `i` draws
/// from stream `i` of `seed`.
pub fn run_scan(
    voltages: &[f64],
    base_phase_alice: f64,
    system: &SystemConfig,
    gates_per_point: u64,
    seed: u64,
) -> Result<ScanResult> {
    if gates_per_point == 0 {
        return Err(Error::InvalidArgument("gates per point must be at least 1"));
    }
    system.validate()?;
    let pm1 = ModulatorSetting::from_phase(base_phase_alice, system.v_pi)?;
    let duration_s = gates_per_point as f64 / system.source.rep_rate;
    let mut out = ScanResult {
        voltages: voltages.to_vec(),
        d1_counts: Vec::with_capacity(voltages.len()),
        d2_counts: Vec::with_capacity(voltages.len()),
        d1_signal: Vec::with_capacity(voltages.len()),
        d2_signal: Vec::with_capacity(voltages.len()),
        duration_s,
    };
    for (i, &v) in voltages.iter().enumerate() {
        let pm2 = ModulatorSetting::from_voltage(v, system.v_pi)?;
        let c = system.combine(&pm1, &pm2)?;
        let (p1, p2) = bb84_probs(&c);
        let model = system.gate_model(c.power)?;
        let t = model.sample_counts(p1, p2, gates_per_point, &mut stream_rng(seed, i as u64))?;
        out.d1_counts.push(t.d1_clicks as f64 / duration_s);
        out.d2_counts.push(t.d2_clicks as f64 / duration_s);
        out.d1_signal.push(t.d1_signal as f64 / duration_s);
        out.d2_signal.push(t.d2_signal as f64 / duration_s);
    }
    Ok(out)
}

/// One time bin of a stability run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriftPoint {
    /// Bin midpoint.
    pub time_s: f64,
    /// Phase imbalance applied during the bin.
    pub drift: f64,
    pub d1_counts: f64,
    pub d2_counts: f64,
    /// D2 over D1 with both modulators at zero, floored at one count.
    pub extinction_db: f64,
}

/// Stability run with the imbalance growing linearly at `drift_rate`
/// rad/s.
pub fn drift_series(
    duration_s: f64,
    drift_rate: f64,
    bin_s: f64,
    system: &SystemConfig,
    seed: u64,
) -> Result<Vec<DriftPoint>> {
    if !drift_rate.is_finite() {
        return Err(Error::InvalidArgument("drift rate must be finite"));
    }
    drift_series_with(duration_s, bin_s, system, seed, |t| drift_rate * t)
}

/// Stability run with an arbitrary imbalance schedule `t -> delta theta`.
///
/// Both modulators sit at 0 V, where D2 sees the bright port and D1 the
/// dark one; the per-bin extinction is their ratio. Bin `k` draws from
/// stream `k` of `seed`.
pub fn drift_series_with(
    duration_s: f64,
    bin_s: f64,
    system: &SystemConfig,
    seed: u64,
    schedule: impl Fn(f64) -> f64,
) -> Result<Vec<DriftPoint>> {
    if !(duration_s > 0.0) || !duration_s.is_finite() {
        return Err(Error::InvalidArgument("duration must be positive"));
    }
    if !(bin_s > 0.0) || !bin_s.is_finite() {
        return Err(Error::InvalidArgument("bin width must be positive"));
    }
    system.validate()?;
    let bins = libm::ceil(duration_s / bin_s - 1e-9).max(1.0) as u64;
    let zero = ModulatorSetting::from_phase(0.0, system.v_pi)?;
    let mut out = Vec::with_capacity(bins as usize);
    for k in 0..bins {
        let start = k as f64 * bin_s;
        let width = bin_s.min(duration_s - start);
        let mid = start + 0.5 * width;
        let drift = schedule(mid);
        let mut drifted = system.clone();
        drifted.arms = system.arms.with_extra_drift(drift);
        let c = drifted.combine(&zero, &zero)?;
        let (p1, p2) = bb84_probs(&c);
        let gates = libm::round(width * system.source.rep_rate).max(1.0) as u64;
        let t = drifted
            .gate_model(c.power)?
            .sample_counts(p1, p2, gates, &mut stream_rng(seed, k))?;
        let secs = gates as f64 / system.source.rep_rate;
        let d1 = t.d1_clicks as f64 / secs;
        let d2 = t.d2_clicks as f64 / secs;
        out.push(DriftPoint {
            time_s: mid,
            drift,
            d1_counts: d1,
            d2_counts: d2,
            extinction_db: floored_extinction_db(d2.max(1.0 / secs), d1, secs)?,
        });
    }
    Ok(out)
}
