//! BB84 and B92 sessions on top of the interferometer and detector models.
//!
//! Bit conventions:
//!
//! * BB84: Alice sends 0 for phases `{0, pi/2}` and 1 for `{pi, 3pi/2}`.
//!   Bob picks `0` or `pi/2` and reads 0 from D2, 1 from D1. A gate is
//!   sifted when Alice's phase modulo pi equals Bob's and exactly one
//!   detector fired.
//! * B92: Alice sends 0 as phase `0` and 1 as `pi/2`; Bob picks `pi` or
//!   `3pi/2` and has a single detector. A click with `3pi/2` means 0, with
//!   `pi` means 1; the other pairing never transmits through the polarizer.

use alloc::vec::Vec;

use rand::Rng;

use crate::error::{Error, Result};
use crate::interferometer::{b92_prob, bb84_probs, QuarterPhase};
use crate::photon::{Detector, GateModel, GateOutcome};
use crate::rng::stream_rng;
use crate::system::SystemConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Protocol {
    Bb84,
    B92,
}

impl Protocol {
    pub fn name(self) -> &'static str {
        match self {
            Protocol::Bb84 => "bb84",
            Protocol::B92 => "b92",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PulseRecord {
    pub index: u64,
    pub alice_phase: QuarterPhase,
    pub bob_phase: QuarterPhase,
    pub outcome: GateOutcome,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SiftedKey {
    pub alice_bits: Vec<bool>,
    pub bob_bits: Vec<bool>,
    pub source_indices: Vec<u64>,
}

impl SiftedKey {
    pub fn len(&self) -> usize {
        self.alice_bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alice_bits.is_empty()
    }

    fn push(&mut self, index: u64, alice: bool, bob: bool) {
        self.source_indices.push(index);
        self.alice_bits.push(alice);
        self.bob_bits.push(bob);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SessionStats {
    pub gates_total: u64,
    /// Gates with at least one click.
    pub clicks_total: u64,
    pub double_clicks: u64,
    pub sifted_length: u64,
    /// `sifted_length / clicks_total`, zero when nothing clicked.
    pub sifted_fraction: f64,
    /// `None` when the sifted key is empty.
    pub qber: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Session {
    pub protocol: Protocol,
    pub key: SiftedKey,
    pub stats: SessionStats,
    pub records: Vec<PulseRecord>,
}

impl Session {
    /// Sifts `records` and computes the statistics.
    pub fn from_records(protocol: Protocol, records: Vec<PulseRecord>) -> Session {
        let key = match protocol {
            Protocol::Bb84 => sift_bb84(&records),
            Protocol::B92 => sift_b92(&records),
        };
        let clicks_total = records.iter().filter(|r| r.outcome.any_click()).count() as u64;
        let stats = SessionStats {
            gates_total: records.len() as u64,
            clicks_total,
            double_clicks: records.iter().filter(|r| r.outcome.double_click()).count() as u64,
            sifted_length: key.len() as u64,
            sifted_fraction: if clicks_total == 0 {
                0.0
            } else {
                key.len() as f64 / clicks_total as f64
            },
            qber: compute_qber(&key).ok(),
        };
        Session {
            protocol,
            key,
            stats,
            records,
        }
    }
}

pub fn bb84_alice_bit(phase: QuarterPhase) -> bool {
    matches!(phase, QuarterPhase::Pi | QuarterPhase::ThreeHalfPi)
}

pub fn bb84_bob_bit(detector: Detector) -> bool {
    detector == Detector::D1
}

/// `None` for phases outside Alice's B92 alphabet.
pub fn b92_alice_bit(phase: QuarterPhase) -> Option<bool> {
    match phase {
        QuarterPhase::Zero => Some(false),
        QuarterPhase::HalfPi => Some(true),
        _ => None,
    }
}

/// Bit Bob infers from a click; `None` for phases outside his B92 alphabet.
pub fn b92_bob_bit(phase: QuarterPhase) -> Option<bool> {
    match phase {
        QuarterPhase::ThreeHalfPi => Some(false),
        QuarterPhase::Pi => Some(true),
        _ => None,
    }
}

/// Detection probabilities for every modulator pair of a configuration.
#[derive(Debug, Clone)]
pub struct ProbabilityTable {
    bb84: [[(f64, f64); 4]; 4],
    b92: [[f64; 4]; 4],
    transmission: f64,
}

impl ProbabilityTable {
    pub fn new(system: &SystemConfig) -> Result<Self> {
        system.validate()?;
        let mut t = ProbabilityTable {
            bb84: [[(0.0, 0.0); 4]; 4],
            b92: [[0.0; 4]; 4],
            transmission: 0.0,
        };
        for a in QuarterPhase::ALL {
            for b in QuarterPhase::ALL {
                let c = system.combine_phases(a.radians(), b.radians())?;
                t.bb84[a.index()][b.index()] = bb84_probs(&c);
                t.b92[a.index()][b.index()] = b92_prob(&c);
                // Channel loss and slot routing do not depend on the phases.
                t.transmission = c.power;
            }
        }
        Ok(t)
    }

    pub fn bb84(&self, alice: QuarterPhase, bob: QuarterPhase) -> (f64, f64) {
        self.bb84[alice.index()][bob.index()]
    }

    pub fn b92(&self, alice: QuarterPhase, bob: QuarterPhase) -> f64 {
        self.b92[alice.index()][bob.index()]
    }

    pub fn transmission(&self) -> f64 {
        self.transmission
    }
}

fn sample_outcome(
    protocol: Protocol,
    table: &ProbabilityTable,
    model: &GateModel,
    alice: QuarterPhase,
    bob: QuarterPhase,
    rng: &mut crate::rng::SimRng,
) -> GateOutcome {
    match protocol {
        Protocol::Bb84 => {
            let (p1, p2) = table.bb84(alice, bob);
            // Analytic values can overshoot 1 by an ulp.
            let s = p1 + p2;
            let (p1, p2) = if s > 1.0 { (p1 / s, p2 / s) } else { (p1, p2) };
            model.sample(p1, p2, rng)
        }
        Protocol::B92 => model.sample_single(table.b92(alice, bob).min(1.0), rng),
    }
}

/// Runs `n_gates` gates of `protocol` with uniformly random modulator
/// choices, then sifts. All draws come from stream 0 of `seed`.
pub fn run_session(protocol: Protocol, n_gates: u64, system: &SystemConfig, seed: u64) -> Result<Session> {
    if n_gates == 0 {
        return Err(Error::InvalidArgument("a session needs at least one gate"));
    }
    let table = ProbabilityTable::new(system)?;
    let model = system.gate_model(table.transmission())?;
    let mut rng = stream_rng(seed, 0);
    let mut records = Vec::with_capacity(n_gates as usize);
    for index in 0..n_gates {
        let (alice, bob) = match protocol {
            Protocol::Bb84 => (
                QuarterPhase::from_index(rng.random_range(0..4)),
                QuarterPhase::from_index(rng.random_range(0..2)),
            ),
            Protocol::B92 => (
                QuarterPhase::from_index(rng.random_range(0..2)),
                QuarterPhase::from_index(2 + rng.random_range(0..2)),
            ),
        };
        let outcome = sample_outcome(protocol, &table, &model, alice, bob, &mut rng);
        records.push(PulseRecord {
            index,
            alice_phase: alice,
            bob_phase: bob,
            outcome,
        });
    }
    Ok(Session::from_records(protocol, records))
}

/// Keeps single-click gates where Bob's basis matched Alice's.
pub fn sift_bb84(records: &[PulseRecord]) -> SiftedKey {
    let mut key = SiftedKey::default();
    for r in records {
        if r.alice_phase.basis() != r.bob_phase {
            continue;
        }
        if let Some(det) = r.outcome.single_click() {
            key.push(r.index, bb84_alice_bit(r.alice_phase), bb84_bob_bit(det));
        }
    }
    key
}

/// Keeps every gate where Bob's detector fired.
pub fn sift_b92(records: &[PulseRecord]) -> SiftedKey {
    let mut key = SiftedKey::default();
    for r in records.iter().filter(|r| r.outcome.d1_click) {
        if let (Some(a), Some(b)) = (b92_alice_bit(r.alice_phase), b92_bob_bit(r.bob_phase)) {
            key.push(r.index, a, b);
        }
    }
    key
}

/// Fraction of sifted positions where Alice and Bob disagree.
pub fn compute_qber(key: &SiftedKey) -> Result<f64> {
    if key.is_empty() {
        return Err(Error::InvalidArgument("QBER of an empty key is undefined"));
    }
    if key.alice_bits.len() != key.bob_bits.len() {
        return Err(Error::InvalidArgument("alice and bob keys differ in length"));
    }
    let errors = key.alice_bits.iter().zip(&key.bob_bits).filter(|(a, b)| a != b).count();
    Ok(errors as f64 / key.len() as f64)
}

/// How Eve picks her measurement basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EveStrategy {
    Random,
    /// Always Alice's basis (an oracle Eve; leaves no errors).
    MatchAlice,
    /// Always the other basis.
    OppositeAlice,
}

/// Intercept-resend attack on a finished BB84 log.
///
/// For every gate Eve measures Alice's pulse with an ideal BB84 head in her
/// chosen basis, then prepares her result in that basis and sends it on.
/// Bob's gate is re-simulated against Eve's pulse with the configuration's
/// own loss and detectors; Alice's and Bob's choices are kept. Draws come
/// from stream 1 of `seed`.
pub fn eve_intercept_resend(
    records: &[PulseRecord],
    system: &SystemConfig,
    strategy: EveStrategy,
    seed: u64,
) -> Result<Vec<PulseRecord>> {
    if records.iter().any(|r| r.bob_phase.basis() != r.bob_phase) {
        return Err(Error::Precondition("intercept-resend needs BB84 records"));
    }
    let table = ProbabilityTable::new(system)?;
    let model = system.gate_model(table.transmission())?;
    let mut rng = stream_rng(seed, 1);
    let mut out = Vec::with_capacity(records.len());
    for r in records {
        let eve_basis = match strategy {
            EveStrategy::Random => QuarterPhase::from_index(rng.random_range(0..2)),
            EveStrategy::MatchAlice => r.alice_phase.basis(),
            EveStrategy::OppositeAlice => r.alice_phase.basis().plus(QuarterPhase::HalfPi),
        };
        let (p_d1, _) = table.bb84(r.alice_phase, eve_basis);
        let eve_bit = rng.random::<f64>() < p_d1;
        let resent = eve_basis.plus(if eve_bit { QuarterPhase::Pi } else { QuarterPhase::Zero });
        let outcome = sample_outcome(Protocol::Bb84, &table, &model, resent, r.bob_phase, &mut rng);
        out.push(PulseRecord { outcome, ..*r });
    }
    Ok(out)
}
