//! Complete physical configuration of a link.

use crate::error::{Error, Result};
use crate::interferometer::{
    end_to_end_in, ArmFibers, ArmPhases, ChannelModel, CombinedState, ModulatorSetting, DEFAULT_V_PI,
};
use crate::photon::{DetectorConfig, GateModel, SourceConfig};

/// Length of the reference trunk fiber.
pub const REFERENCE_FIBER_KM: f64 = 50.0;
/// Attenuation assumed for the reference fiber at 1310 nm.
pub const REFERENCE_LOSS_DB_PER_KM: f64 = 0.35;
/// Signal detection probability per pulse at the bright port that the
/// reference configuration is calibrated to (1750 counts/s at 1 MHz).
pub const REFERENCE_NET_DETECTION: f64 = 1.75e-3;

#[derive(Debug, Clone, PartialEq)]
pub struct SystemConfig {
    pub arms: ArmPhases,
    pub fibers: ArmFibers,
    /// Half-wave voltage shared by both modulators.
    pub v_pi: f64,
    pub channel: ChannelModel,
    pub source: SourceConfig,
    pub detector: DetectorConfig,
}

impl Default for SystemConfig {
    fn default() -> Self {
        Self::reference().expect("reference configuration is valid")
    }
}

impl SystemConfig {
    /// The reference experiment: V_pi = 5.4 V, 1 MHz, 100 ns gates,
    /// 3e-7/ns dark counts, 50 km of fiber, mu = 0.1 and the detector
    /// efficiency chosen so the bright port sees [`REFERENCE_NET_DETECTION`].
    pub fn reference() -> Result<Self> {
        let mut cfg = Self {
            arms: ArmPhases::default(),
            fibers: ArmFibers::default(),
            v_pi: DEFAULT_V_PI,
            channel: ChannelModel::lossless().with_loss_db(REFERENCE_FIBER_KM * REFERENCE_LOSS_DB_PER_KM),
            source: SourceConfig::default(),
            detector: DetectorConfig::default(),
        };
        cfg.calibrate_efficiency(REFERENCE_NET_DETECTION)?;
        Ok(cfg)
    }

    /// Lossless link, unit efficiency, no dark counts.
    pub fn ideal() -> Self {
        Self {
            arms: ArmPhases::default(),
            fibers: ArmFibers::default(),
            v_pi: DEFAULT_V_PI,
            channel: ChannelModel::lossless(),
            source: SourceConfig::default(),
            detector: DetectorConfig {
                efficiency: 1.0,
                dark_rate_per_ns: 0.0,
                gate_width_ns: 100.0,
            },
        }
    }

    /// Sets the detector efficiency so that a pulse sent to the bright port
    /// is detected with probability `net_detection`.
    pub fn calibrate_efficiency(&mut self, net_detection: f64) -> Result<()> {
        self.detector.efficiency = calibrated_efficiency(
            net_detection,
            self.source.mean_photon_number,
            self.channel.power_transmission(),
        )?;
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.v_pi > 0.0) || !self.v_pi.is_finite() {
            return Err(Error::InvalidArgument("half-wave voltage must be positive"));
        }
        self.channel.validate()?;
        self.source.validate()?;
        self.detector.validate()
    }

    pub fn combine(&self, pm1: &ModulatorSetting, pm2: &ModulatorSetting) -> Result<CombinedState> {
        end_to_end_in(&self.fibers, &self.arms, pm1, pm2, &self.channel)
    }

    /// Combined state for modulator phases given in radians.
    pub fn combine_phases(&self, alice: f64, bob: f64) -> Result<CombinedState> {
        self.combine(
            &ModulatorSetting::from_phase(alice, self.v_pi)?,
            &ModulatorSetting::from_phase(bob, self.v_pi)?,
        )
    }

    pub fn gate_model(&self, transmission: f64) -> Result<GateModel> {
        GateModel::new(&self.source, &self.detector, transmission.clamp(0.0, 1.0))
    }
}

/// Efficiency `eta` solving `1 - exp(-mu * transmission * eta) = net`.
pub fn calibrated_efficiency(net_detection: f64, mean_photons: f64, transmission: f64) -> Result<f64> {
    if !(net_detection > 0.0 && net_detection < 1.0) {
        return Err(Error::InvalidArgument("net detection probability must lie in (0, 1)"));
    }
    if !(mean_photons > 0.0) || !(transmission > 0.0) {
        return Err(Error::InvalidArgument(
            "mean photon number and transmission must be positive",
        ));
    }
    let eta = -libm::log1p(-net_detection) / (mean_photons * transmission);
    if eta > 1.0 {
        return Err(Error::InvalidArgument(
            "target detection rate needs a detector efficiency above 1",
        ));
    }
    Ok(eta)
}
