//! The kinaesthetic map: smoothing, calibration and threshold translation.

mod filter;
mod profile;
mod translate;

pub use filter::{FilteredFrame, OneEuro, Smoother, DERIVATIVE_CUTOFF_HZ};
pub use profile::{CalibrationProfile, ProfileError, ProfilePatch};
pub use translate::{ActiveMode, ControlEvent, EventKind, Mode, Translator};

use crate::wire::SensorFrame;

/// Smoother and translator driven together from raw frames.
#[derive(Debug, Clone)]
pub struct SignalChain {
    smoother: Smoother,
    translator: Translator,
}

impl SignalChain {
    pub fn new(profile: CalibrationProfile, active: ActiveMode) -> Result<Self, ProfileError> {
        let smoother = Smoother::new(profile.filter_min_cutoff, profile.filter_beta);
        Ok(Self {
            smoother,
            translator: Translator::new(profile, active)?,
        })
    }

    pub fn profile(&self) -> &CalibrationProfile {
        self.translator.profile()
    }

    pub fn mode(&self) -> Mode {
        self.translator.mode()
    }

    pub fn translator(&self) -> &Translator {
        &self.translator
    }

    /// Frames dropped for non-advancing timestamps.
    pub fn dropped(&self) -> u64 {
        self.smoother.dropped()
    }

    /// Swaps the whole profile; the next frame sees only the new values.
    pub fn set_profile(&mut self, profile: CalibrationProfile) -> Result<(), ProfileError> {
        self.translator.set_profile(profile)?;
        let p = self.translator.profile();
        self.smoother.set_params(p.filter_min_cutoff, p.filter_beta);
        Ok(())
    }

    /// Returns `None` for dropped frames.
    pub fn process(
        &mut self,
        frame: &SensorFrame,
        out: &mut Vec<ControlEvent>,
    ) -> Option<FilteredFrame> {
        let (filtered, dt) = self.smoother.smooth(frame)?;
        self.translator.translate_into(&filtered, dt, out);
        Some(filtered)
    }
}
