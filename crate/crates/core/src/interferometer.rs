//! Alice's and Bob's Faraday-mirror Michelson interferometers, the quantum
//! channel between them, and the BB84 / B92 measurement heads.
//!
//! Alice splits a +45 degree pulse at her PBS. The vertical half runs the
//! short arm (with her modulator) and the horizontal half the delayed long
//! arm; each comes back orthogonally polarized and both leave through the
//! output port, one delay apart. At Bob's PBS the early pulse (now
//! horizontal) takes his long arm and the late one (now vertical) his short
//! arm with his modulator, so the two re-merge into one pulse whose
//! polarization is set by the two modulator phases alone.
//!
//! Every arm is modelled as a full Jones round trip through an arbitrary
//! fiber closed by a Faraday mirror; the per-arm scalar phase `theta` is the
//! argument of the fiber's determinant.

use core::f64::consts::{FRAC_PI_2, FRAC_PI_4, FRAC_PI_8, PI};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::jones::{
    classify, detection_probability, pbs_split, round_trip, Element, ElementMatrix, PolarizationClass,
    PolarizationState,
};

/// Half-wave voltage of the modulators used in the reference experiment.
pub const DEFAULT_V_PI: f64 = 5.4;

/// Birefringence phases of the four arms.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ArmPhases {
    pub theta_sa: f64,
    pub theta_la: f64,
    pub theta_sb: f64,
    pub theta_lb: f64,
}

impl ArmPhases {
    pub const fn new(theta_sa: f64, theta_la: f64, theta_sb: f64, theta_lb: f64) -> Self {
        Self {
            theta_sa,
            theta_la,
            theta_sb,
            theta_lb,
        }
    }

    /// `(theta_sa + theta_lb) - (theta_la + theta_sb)`; zero when the two
    /// paths through the pair of interferometers are phase balanced.
    pub fn drift(&self) -> f64 {
        (self.theta_sa + self.theta_lb) - (self.theta_la + self.theta_sb)
    }

    /// Common phase factored out of the combined state.
    pub fn global_phase(&self) -> f64 {
        self.theta_la + self.theta_sb
    }

    /// Adds `delta` to the drift by shifting Bob's long arm.
    pub fn with_extra_drift(mut self, delta: f64) -> Self {
        self.theta_lb += delta;
        self
    }

    fn validate(&self) -> Result<()> {
        if [self.theta_sa, self.theta_la, self.theta_sb, self.theta_lb]
            .iter()
            .all(|t| t.is_finite())
        {
            Ok(())
        } else {
            Err(Error::InvalidArgument("arm phases must be finite"))
        }
    }
}

/// Polarization scrambling inside each arm, on top of its scalar phase.
///
/// Each entry holds `(mix, a, b)` for [`ElementMatrix::unitary`] with zero
/// global phase, so it has unit determinant and never moves `theta`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ArmFibers {
    pub sa: [f64; 3],
    pub la: [f64; 3],
    pub sb: [f64; 3],
    pub lb: [f64; 3],
}

impl ArmFibers {
    fn forward(params: [f64; 3], theta: f64, modulation: f64) -> ElementMatrix {
        let [mix, a, b] = params;
        // The modulator is crossed twice, half the phase on each pass.
        ElementMatrix::unitary(0.5 * (theta + modulation), mix, a, b)
    }
}

/// Frame change for a beam that has turned around: the horizontal axis
/// flips sign when the returning beam is described in the forward frame of
/// the exit port.
fn mirror_frame() -> ElementMatrix {
    ElementMatrix::real(-1.0, 0.0, 0.0, 1.0)
}

fn arm_return(params: [f64; 3], theta: f64, modulation: f64, input: PolarizationState) -> Result<PolarizationState> {
    let fiber = ArmFibers::forward(params, theta, modulation);
    let rt = round_trip(&fiber, &Element::FaradayMirror.matrix()?)?;
    Ok((mirror_frame() * rt).apply(&input))
}

/// Linear modulator drive: phase = pi * voltage / v_pi.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModulatorSetting {
    pub phase: f64,
    pub voltage: f64,
    pub v_pi: f64,
}

impl ModulatorSetting {
    pub fn from_voltage(voltage: f64, v_pi: f64) -> Result<Self> {
        let phase = voltage_to_phase(voltage, v_pi)?;
        if !voltage.is_finite() {
            return Err(Error::InvalidArgument("modulator voltage must be finite"));
        }
        Ok(Self { phase, voltage, v_pi })
    }

    pub fn from_phase(phase: f64, v_pi: f64) -> Result<Self> {
        if !(v_pi > 0.0) || !v_pi.is_finite() {
            return Err(Error::InvalidArgument("half-wave voltage must be positive"));
        }
        if !phase.is_finite() {
            return Err(Error::InvalidArgument("modulator phase must be finite"));
        }
        Ok(Self {
            phase,
            voltage: phase * v_pi / PI,
            v_pi,
        })
    }
}

pub fn voltage_to_phase(voltage: f64, v_pi: f64) -> Result<f64> {
    if !(v_pi > 0.0) || !v_pi.is_finite() {
        return Err(Error::InvalidArgument("half-wave voltage must be positive"));
    }
    Ok(PI * voltage / v_pi)
}

/// The quantum channel: fiber birefringence, the polarization controller
/// that undoes it, and a polarization-independent loss.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelModel {
    pub misalignment: ElementMatrix,
    pub compensator: ElementMatrix,
    pub loss_db: f64,
}

impl Default for ChannelModel {
    fn default() -> Self {
        Self::lossless()
    }
}

impl ChannelModel {
    pub fn lossless() -> Self {
        Self {
            misalignment: ElementMatrix::identity(),
            compensator: ElementMatrix::identity(),
            loss_db: 0.0,
        }
    }

    pub fn with_loss_db(mut self, loss_db: f64) -> Self {
        self.loss_db = loss_db;
        self
    }

    /// Birefringent channel with the controller left at identity.
    pub fn uncompensated(misalignment: ElementMatrix) -> Self {
        Self {
            misalignment,
            ..Self::lossless()
        }
    }

    /// Birefringent channel with the controller set to its exact inverse.
    pub fn compensated(misalignment: ElementMatrix) -> Self {
        Self {
            misalignment,
            compensator: misalignment.unitary_inverse(),
            loss_db: 0.0,
        }
    }

    pub fn amplitude_transmission(&self) -> f64 {
        libm::pow(10.0, -self.loss_db / 20.0)
    }

    pub fn power_transmission(&self) -> f64 {
        libm::pow(10.0, -self.loss_db / 10.0)
    }

    /// Net Jones matrix seen by a pulse, loss included.
    pub fn matrix(&self) -> ElementMatrix {
        (self.compensator * self.misalignment).scale(self.amplitude_transmission().into())
    }

    pub fn validate(&self) -> Result<()> {
        if !self.loss_db.is_finite() || self.loss_db < 0.0 {
            return Err(Error::InvalidArgument(
                "channel loss must be a finite, non-negative dB value",
            ));
        }
        if !self.misalignment.is_unitary(crate::jones::UNITARITY_TOL)
            || !self.compensator.is_unitary(crate::jones::UNITARITY_TOL)
        {
            return Err(Error::InvalidArgument(
                "channel and compensator matrices must be unitary",
            ));
        }
        Ok(())
    }
}

/// The single pulse leaving Bob's PBS.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CombinedState {
    /// Normalized polarization with `global_phase` removed.
    pub state: PolarizationState,
    /// `theta_la + theta_sb`, the unobservable common phase.
    pub global_phase: f64,
    /// [`ArmPhases::drift`] of the configuration that produced the state.
    pub drift: f64,
    /// Fraction of the source power that lands in the interfering time slot.
    pub power: f64,
}

/// Amplitudes of the two pulses leaving Alice: `(on |h>, on |v>)`.
///
/// The first pulse ran the short arm, the second the long arm. The input is
/// the unit +45 degree state, so each carries `1/sqrt(2)` in modulus.
pub fn alice_leg_states(phases: &ArmPhases, pm1: &ModulatorSetting) -> Result<(Complex64, Complex64)> {
    alice_leg_states_in(&ArmFibers::default(), phases, pm1)
}

pub fn alice_leg_states_in(
    fibers: &ArmFibers,
    phases: &ArmPhases,
    pm1: &ModulatorSetting,
) -> Result<(Complex64, Complex64)> {
    phases.validate()?;
    let (to_long, to_short) = pbs_split(&PolarizationState::plus45());
    let short = arm_return(
        fibers.sa,
        phases.theta_sa,
        pm1.phase,
        PolarizationState::new(Complex64::new(0.0, 0.0), to_short),
    )?;
    let long = arm_return(
        fibers.la,
        phases.theta_la,
        0.0,
        PolarizationState::new(to_long, Complex64::new(0.0, 0.0)),
    )?;
    // Short-arm light returns horizontal and is transmitted, long-arm light
    // returns vertical and is reflected; the other components go back
    // towards the source.
    Ok((pbs_split(&short).0, pbs_split(&long).1))
}

/// Runs the two pulses through Bob's interferometer and merges them.
///
/// `lambda1` is the early pulse's horizontal amplitude and `lambda2` the
/// late pulse's vertical amplitude, as they reach Bob's PBS.
pub fn bob_combine(
    phases: &ArmPhases,
    pm2: &ModulatorSetting,
    lambda1: Complex64,
    lambda2: Complex64,
) -> Result<CombinedState> {
    bob_combine_in(&ArmFibers::default(), phases, pm2, lambda1, lambda2)
}

pub fn bob_combine_in(
    fibers: &ArmFibers,
    phases: &ArmPhases,
    pm2: &ModulatorSetting,
    lambda1: Complex64,
    lambda2: Complex64,
) -> Result<CombinedState> {
    phases.validate()?;
    let zero = Complex64::new(0.0, 0.0);
    let long = arm_return(fibers.lb, phases.theta_lb, 0.0, PolarizationState::new(lambda1, zero))?;
    let short = arm_return(
        fibers.sb,
        phases.theta_sb,
        pm2.phase,
        PolarizationState::new(zero, lambda2),
    )?;
    let raw = PolarizationState::new(pbs_split(&short).0, pbs_split(&long).1);
    let power = raw.norm_sqr();
    if !(power > 0.0) {
        return Err(Error::InvalidArgument("both pulse amplitudes are zero"));
    }
    let global_phase = phases.global_phase();
    let state = raw.normalize()?.scale(Complex64::from_polar(1.0, -global_phase));
    Ok(CombinedState {
        state,
        global_phase,
        drift: phases.drift(),
        power,
    })
}

/// Alice, the channel, then Bob.
pub fn end_to_end(
    phases: &ArmPhases,
    pm1: &ModulatorSetting,
    pm2: &ModulatorSetting,
    channel: &ChannelModel,
) -> Result<CombinedState> {
    end_to_end_in(&ArmFibers::default(), phases, pm1, pm2, channel)
}

pub fn end_to_end_in(
    fibers: &ArmFibers,
    phases: &ArmPhases,
    pm1: &ModulatorSetting,
    pm2: &ModulatorSetting,
    channel: &ChannelModel,
) -> Result<CombinedState> {
    channel.validate()?;
    let zero = Complex64::new(0.0, 0.0);
    let (lambda1, lambda2) = alice_leg_states_in(fibers, phases, pm1)?;
    let c = channel.matrix();
    // Only the components that Bob's PBS routes into the complementary arm
    // meet in the central time slot; the rest leaves one delay early or late.
    let early = c.apply(&PolarizationState::new(lambda1, zero));
    let late = c.apply(&PolarizationState::new(zero, lambda2));
    bob_combine_in(fibers, phases, pm2, early.h, late.v)
}

/// BB84 head: half-wave plate at +22.5 degrees, then a PBS with D1 on the
/// vertical port and D2 on the horizontal port. Returns `(p_d1, p_d2)`.
pub fn bb84_probs(c: &CombinedState) -> (f64, f64) {
    let hwp = ElementMatrix::real(
        libm::cos(2.0 * FRAC_PI_8),
        libm::sin(2.0 * FRAC_PI_8),
        libm::sin(2.0 * FRAC_PI_8),
        -libm::cos(2.0 * FRAC_PI_8),
    );
    let (h, v) = pbs_split(&hwp.apply(&c.state));
    (v.norm_sqr(), h.norm_sqr())
}

/// B92 head: a single detector behind a +45 degree polarizer.
pub fn b92_prob(c: &CombinedState) -> f64 {
    let polarizer = ElementMatrix::real(0.5, 0.5, 0.5, 0.5);
    debug_assert!(polarizer.max_abs_diff(&Element::LinearPolarizer(FRAC_PI_4).matrix().unwrap()) < 1e-15);
    detection_probability(&c.state, &polarizer)
}

/// The four modulator settings used by both protocols.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum QuarterPhase {
    Zero,
    HalfPi,
    Pi,
    ThreeHalfPi,
}

impl QuarterPhase {
    pub const ALL: [QuarterPhase; 4] = [
        QuarterPhase::Zero,
        QuarterPhase::HalfPi,
        QuarterPhase::Pi,
        QuarterPhase::ThreeHalfPi,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> QuarterPhase {
        Self::ALL[i & 3]
    }

    pub fn radians(self) -> f64 {
        self.index() as f64 * FRAC_PI_2
    }

    /// The basis this phase belongs to: `Zero` for `{0, pi}`, `HalfPi` for
    /// `{pi/2, 3pi/2}`.
    pub fn basis(self) -> QuarterPhase {
        Self::from_index(self.index() % 2)
    }

    pub fn plus(self, other: QuarterPhase) -> QuarterPhase {
        Self::from_index(self.index() + other.index())
    }

    pub fn label(self) -> &'static str {
        match self {
            QuarterPhase::Zero => "0",
            QuarterPhase::HalfPi => "pi/2",
            QuarterPhase::Pi => "pi",
            QuarterPhase::ThreeHalfPi => "3pi/2",
        }
    }
}

/// One cell of the analytic truth table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruthRow {
    pub alice: QuarterPhase,
    pub bob: QuarterPhase,
    pub class: PolarizationClass,
    pub bb84_d1: f64,
    pub bb84_d2: f64,
    /// Present only for the pairs the B92 variant uses (Alice in
    /// `{0, pi/2}`, Bob in `{pi, 3pi/2}`).
    pub b92_d: Option<f64>,
}

/// All 16 modulator pairs through ideal, balanced optics.
pub fn truth_table() -> Result<[TruthRow; 16]> {
    let phases = ArmPhases::default();
    let channel = ChannelModel::lossless();
    let mut rows = [TruthRow {
        alice: QuarterPhase::Zero,
        bob: QuarterPhase::Zero,
        class: PolarizationClass::Elliptical,
        bb84_d1: 0.0,
        bb84_d2: 0.0,
        b92_d: None,
    }; 16];
    for (i, row) in rows.iter_mut().enumerate() {
        let alice = QuarterPhase::from_index(i / 4);
        let bob = QuarterPhase::from_index(i % 4);
        let pm1 = ModulatorSetting::from_phase(alice.radians(), DEFAULT_V_PI)?;
        let pm2 = ModulatorSetting::from_phase(bob.radians(), DEFAULT_V_PI)?;
        let c = end_to_end(&phases, &pm1, &pm2, &channel)?;
        let (d1, d2) = bb84_probs(&c);
        let b92_cell = matches!(alice, QuarterPhase::Zero | QuarterPhase::HalfPi)
            && matches!(bob, QuarterPhase::Pi | QuarterPhase::ThreeHalfPi);
        *row = TruthRow {
            alice,
            bob,
            class: classify(&c.state)?,
            bb84_d1: d1,
            bb84_d2: d2,
            b92_d: b92_cell.then(|| b92_prob(&c)),
        };
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::f64::consts::{FRAC_1_SQRT_2, PI};
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn pm(phase: f64) -> ModulatorSetting {
        ModulatorSetting::from_phase(phase, DEFAULT_V_PI).unwrap()
    }

    fn close(a: Complex64, b: Complex64) -> bool {
        (a - b).norm() < 1e-12
    }

    #[test]
    fn alice_zero_phases() {
        let (l1, l2) = alice_leg_states(&ArmPhases::default(), &pm(0.0)).unwrap();
        assert!(close(l1, c(-FRAC_1_SQRT_2, 0.0)));
        assert!(close(l2, c(-FRAC_1_SQRT_2, 0.0)));
    }

    #[test]
    fn alice_pi_modulation_flips_short_pulse() {
        let (l1, _) = alice_leg_states(&ArmPhases::default(), &pm(PI)).unwrap();
        assert!(close(l1, c(FRAC_1_SQRT_2, 0.0)));
    }

    #[test]
    fn alice_general_substitution() {
        let phases = ArmPhases::new(PI / 3.0, PI / 5.0, 0.0, 0.0);
        let (l1, l2) = alice_leg_states(&phases, &pm(PI / 2.0)).unwrap();
        let e1 = -Complex64::from_polar(FRAC_1_SQRT_2, PI / 3.0 + PI / 2.0);
        let e2 = -Complex64::from_polar(FRAC_1_SQRT_2, PI / 5.0);
        assert!(close(l1, e1));
        assert!(close(l2, e2));
    }

    #[test]
    fn bob_combine_examples() {
        let zero = ArmPhases::default();
        let a = c(-FRAC_1_SQRT_2, 0.0);
        let out = bob_combine(&zero, &pm(0.0), a, a).unwrap();
        assert!(close(out.state.h, c(FRAC_1_SQRT_2, 0.0)));
        assert!(close(out.state.v, c(FRAC_1_SQRT_2, 0.0)));
        assert_eq!(classify(&out.state).unwrap(), PolarizationClass::Plus45);

        let out = bob_combine(&zero, &pm(PI), a, a).unwrap();
        assert!(close(out.state.h, c(-FRAC_1_SQRT_2, 0.0)));
        assert!(close(out.state.v, c(FRAC_1_SQRT_2, 0.0)));
        assert_eq!(classify(&out.state).unwrap(), PolarizationClass::Minus45);
    }

    #[test]
    fn bob_combine_rejects_darkness() {
        let z = c(0.0, 0.0);
        assert!(matches!(
            bob_combine(&ArmPhases::default(), &pm(0.0), z, z),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn balanced_arms_cancel() {
        let phases = ArmPhases::new(0.3, 0.7, 0.2, 0.6);
        assert!(phases.drift().abs() < 1e-15);
        for &(p1, p2) in &[(0.0, 0.0), (0.4, 2.1), (PI, PI / 2.0)] {
            let a = end_to_end(&phases, &pm(p1), &pm(p2), &ChannelModel::lossless()).unwrap();
            let b = end_to_end(&ArmPhases::default(), &pm(p1), &pm(p2), &ChannelModel::lossless()).unwrap();
            assert!(close(a.state.h, b.state.h) && close(a.state.v, b.state.v));
            assert!((a.global_phase - 0.9).abs() < 1e-15);
        }
    }

    #[test]
    fn end_to_end_table_cells() {
        let ch = ChannelModel::lossless();
        let z = ArmPhases::default();
        let s = end_to_end(&z, &pm(PI / 2.0), &pm(PI / 2.0), &ch).unwrap();
        assert_eq!(classify(&s.state).unwrap(), PolarizationClass::Plus45);
        let s = end_to_end(&z, &pm(3.0 * PI / 2.0), &pm(PI / 2.0), &ch).unwrap();
        assert_eq!(classify(&s.state).unwrap(), PolarizationClass::Minus45);
        let s = end_to_end(&z, &pm(PI), &pm(0.0), &ch).unwrap();
        assert_eq!(classify(&s.state).unwrap(), PolarizationClass::Minus45);
    }

    #[test]
    fn measurement_head_examples() {
        let ch = ChannelModel::lossless();
        let z = ArmPhases::default();
        let probs = |p1: f64, p2: f64| bb84_probs(&end_to_end(&z, &pm(p1), &pm(p2), &ch).unwrap());
        let (d1, d2) = probs(0.0, 0.0);
        assert!(d1.abs() < 1e-12 && (d2 - 1.0).abs() < 1e-12);
        let (d1, d2) = probs(PI, 0.0);
        assert!((d1 - 1.0).abs() < 1e-12 && d2.abs() < 1e-12);
        let (d1, d2) = probs(0.0, PI / 2.0);
        assert!((d1 - 0.5).abs() < 1e-12 && (d2 - 0.5).abs() < 1e-12);

        let b92 = |p1: f64, p2: f64| b92_prob(&end_to_end(&z, &pm(p1), &pm(p2), &ch).unwrap());
        assert!(b92(0.0, PI).abs() < 1e-12);
        assert!((b92(0.0, 1.5 * PI) - 0.5).abs() < 1e-12);
        assert!((b92(PI / 2.0, PI) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn voltage_mapping() {
        assert!((voltage_to_phase(5.4, 5.4).unwrap() - PI).abs() < 1e-15);
        assert_eq!(voltage_to_phase(0.0, 5.4).unwrap(), 0.0);
        assert!((voltage_to_phase(2.7, 5.4).unwrap() - PI / 2.0).abs() < 1e-15);
        assert!(matches!(voltage_to_phase(1.0, 0.0), Err(Error::InvalidArgument(_))));
        assert!(voltage_to_phase(1.0, -5.4).is_err());
        let m = ModulatorSetting::from_voltage(2.7, 5.4).unwrap();
        assert!((m.phase - PI / 2.0).abs() < 1e-15);
        let m = ModulatorSetting::from_phase(PI, 5.4).unwrap();
        assert!((m.voltage - 5.4).abs() < 1e-12);
    }

    #[test]
    fn loss_scales_power_only() {
        let z = ArmPhases::default();
        let ch = ChannelModel::lossless().with_loss_db(17.5);
        let lossy = end_to_end(&z, &pm(0.3), &pm(1.1), &ch).unwrap();
        let clean = end_to_end(&z, &pm(0.3), &pm(1.1), &ChannelModel::lossless()).unwrap();
        assert!((clean.power - 1.0).abs() < 1e-12);
        assert!((lossy.power - libm::pow(10.0, -1.75)).abs() < 1e-12);
        assert!(close(lossy.state.h, clean.state.h) && close(lossy.state.v, clean.state.v));
    }

    #[test]
    fn uncompensated_channel_loses_light_to_side_slots() {
        let z = ArmPhases::default();
        let rot = Element::Rotator(PI / 4.0).matrix().unwrap();
        let out = end_to_end(&z, &pm(0.0), &pm(0.0), &ChannelModel::uncompensated(rot)).unwrap();
        assert!((out.power - 0.5).abs() < 1e-12);
    }

    #[test]
    fn truth_table_layout() {
        let rows = truth_table().unwrap();
        assert_eq!(rows.iter().filter(|r| r.b92_d.is_some()).count(), 4);
        assert_eq!(rows[3].alice, QuarterPhase::Zero);
        assert_eq!(rows[3].bob, QuarterPhase::ThreeHalfPi);
    }

    #[test]
    fn quarter_phase_arithmetic() {
        use QuarterPhase::*;
        assert_eq!(ThreeHalfPi.basis(), HalfPi);
        assert_eq!(Pi.basis(), Zero);
        assert_eq!(ThreeHalfPi.plus(Pi), HalfPi);
        assert!((ThreeHalfPi.radians() - 1.5 * PI).abs() < 1e-15);
    }

    fn arb_fibers() -> impl Strategy<Value = ArmFibers> {
        proptest::array::uniform12(-PI..PI).prop_map(|p| ArmFibers {
            sa: [p[0], p[1], p[2]],
            la: [p[3], p[4], p[5]],
            sb: [p[6], p[7], p[8]],
            lb: [p[9], p[10], p[11]],
        })
    }

    proptest! {
        #[test]
        fn arm_scrambling_never_matters(
            fibers in arb_fibers(),
            p1 in -PI..PI,
            p2 in -PI..PI,
            t in proptest::array::uniform4(-10.0..10.0f64),
        ) {
            let phases = ArmPhases::new(t[0], t[1], t[2], t[3]);
            let a = end_to_end_in(&fibers, &phases, &pm(p1), &pm(p2), &ChannelModel::lossless()).unwrap();
            let b = end_to_end(&phases, &pm(p1), &pm(p2), &ChannelModel::lossless()).unwrap();
            prop_assert!(close(a.state.h, b.state.h) && close(a.state.v, b.state.v));
        }

        #[test]
        fn compensated_channel_is_transparent(
            g in -PI..PI, m in 0.0..PI, a in -PI..PI, b in -PI..PI,
            p1 in -PI..PI, p2 in -PI..PI,
        ) {
            let u = ElementMatrix::unitary(g, m, a, b);
            let z = ArmPhases::default();
            let x = end_to_end(&z, &pm(p1), &pm(p2), &ChannelModel::compensated(u)).unwrap();
            let y = end_to_end(&z, &pm(p1), &pm(p2), &ChannelModel::lossless()).unwrap();
            prop_assert!(close(x.state.h, y.state.h) && close(x.state.v, y.state.v));
            prop_assert!((x.power - y.power).abs() < 1e-12);
        }

        #[test]
        fn heads_conserve_probability(p1 in -PI..PI, p2 in -PI..PI, d in -PI..PI) {
            let phases = ArmPhases::default().with_extra_drift(d);
            let s = end_to_end(&phases, &pm(p1), &pm(p2), &ChannelModel::lossless()).unwrap();
            let (d1, d2) = bb84_probs(&s);
            prop_assert!((d1 + d2 - 1.0).abs() < 1e-12);
            prop_assert!((s.state.norm_sqr() - 1.0).abs() < 1e-12);
        }
    }
}
