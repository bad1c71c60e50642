//! Threshold state machine: filtered sensor values in, control events out.
//!
//! Tilt past a threshold moves the cursor at a constant rate (joystick
//! style); the cord drives click press/release through a hysteresis pair in
//! pointing mode, or ±Z in arm mode. The push button toggles control on
//! and off.

use serde::{Deserialize, Serialize};

use super::filter::FilteredFrame;
use super::profile::{CalibrationProfile, ProfileError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum EventKind {
    /// Pixels.
    PointerDelta {
        dx: f64,
        dy: f64,
    },
    ClickPress,
    ClickRelease,
    /// Meters.
    ZDelta {
        dz: f64,
    },
    ModeToggle,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlEvent {
    pub t_ms: u32,
    #[serde(flatten)]
    pub kind: EventKind,
}

impl ControlEvent {
    pub fn new(t_ms: u32, kind: EventKind) -> Self {
        Self { t_ms, kind }
    }

    pub fn is_motion(&self) -> bool {
        !matches!(self.kind, EventKind::ModeToggle)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActiveMode {
    Pointing,
    Arm3d,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Pointing,
    Arm3d,
    Released,
}

#[derive(Debug, Clone)]
pub struct Translator {
    profile: CalibrationProfile,
    active: ActiveMode,
    released: bool,
    click_down: bool,
    z_engaged: bool,
    button_prev: bool,
    last_edge_ms: Option<u32>,
}

impl Translator {
    /// Starts in `active` mode (not released).
    pub fn new(profile: CalibrationProfile, active: ActiveMode) -> Result<Self, ProfileError> {
        profile.validate()?;
        Ok(Self {
            profile,
            active,
            released: false,
            click_down: false,
            z_engaged: false,
            button_prev: false,
            last_edge_ms: None,
        })
    }

    pub fn profile(&self) -> &CalibrationProfile {
        &self.profile
    }

    /// Takes effect on the next translated frame. Click and Z state carry
    /// over.
    pub fn set_profile(&mut self, profile: CalibrationProfile) -> Result<(), ProfileError> {
        profile.validate()?;
        self.profile = profile;
        Ok(())
    }

    pub fn mode(&self) -> Mode {
        match (self.released, self.active) {
            (true, _) => Mode::Released,
            (false, ActiveMode::Pointing) => Mode::Pointing,
            (false, ActiveMode::Arm3d) => Mode::Arm3d,
        }
    }

    pub fn click_down(&self) -> bool {
        self.click_down
    }

    pub fn translate(&mut self, frame: &FilteredFrame, dt_s: f64) -> Vec<ControlEvent> {
        let mut out = Vec::new();
        self.translate_into(frame, dt_s, &mut out);
        out
    }

    pub fn translate_into(
        &mut self,
        frame: &FilteredFrame,
        dt_s: f64,
        out: &mut Vec<ControlEvent>,
    ) {
        let t = frame.t_ms;
        let p = &self.profile;

        if frame.button && !self.button_prev {
            let accepted = self
                .last_edge_ms
                .is_none_or(|last| t.saturating_sub(last) >= p.debounce_ms);
            self.last_edge_ms = Some(t);
            if accepted {
                self.released = !self.released;
                out.push(ControlEvent::new(t, EventKind::ModeToggle));
                if self.released && self.click_down {
                    self.click_down = false;
                    out.push(ControlEvent::new(t, EventKind::ClickRelease));
                }
                self.z_engaged = false;
            }
        }
        self.button_prev = frame.button;

        if self.released {
            return;
        }

        if dt_s > 0.0 {
            let step = p.speed_xy * dt_s;
            if frame.ax > p.tilt_pos_x {
                out.push(ControlEvent::new(
                    t,
                    EventKind::PointerDelta { dx: step, dy: 0.0 },
                ));
            } else if frame.ax < p.tilt_neg_x {
                out.push(ControlEvent::new(
                    t,
                    EventKind::PointerDelta { dx: -step, dy: 0.0 },
                ));
            }
            if frame.ay > p.tilt_pos_y {
                out.push(ControlEvent::new(
                    t,
                    EventKind::PointerDelta { dx: 0.0, dy: step },
                ));
            } else if frame.ay < p.tilt_neg_y {
                out.push(ControlEvent::new(
                    t,
                    EventKind::PointerDelta { dx: 0.0, dy: -step },
                ));
            }
        }

        match self.active {
            ActiveMode::Pointing => {
                if !self.click_down && frame.stretch > p.stretch_press {
                    self.click_down = true;
                    out.push(ControlEvent::new(t, EventKind::ClickPress));
                } else if self.click_down && frame.stretch < p.stretch_release {
                    self.click_down = false;
                    out.push(ControlEvent::new(t, EventKind::ClickRelease));
                }
            }
            ActiveMode::Arm3d => {
                if !self.z_engaged && frame.stretch > p.stretch_press {
                    self.z_engaged = true;
                } else if self.z_engaged && frame.stretch < p.stretch_release {
                    self.z_engaged = false;
                }
                if dt_s > 0.0 {
                    let step = p.speed_z * dt_s;
                    if self.z_engaged {
                        out.push(ControlEvent::new(t, EventKind::ZDelta { dz: step }));
                    } else if frame.stretch < p.stretch_press_down {
                        out.push(ControlEvent::new(t, EventKind::ZDelta { dz: -step }));
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rest(t_ms: u32) -> FilteredFrame {
        FilteredFrame {
            t_ms,
            ax: 0.0,
            ay: 0.0,
            az: 1000.0,
            stretch: 300.0,
            button: false,
        }
    }

    fn pointing() -> Translator {
        Translator::new(CalibrationProfile::default(), ActiveMode::Pointing).unwrap()
    }

    #[test]
    fn dead_band_is_silent() {
        let mut tr = pointing();
        for i in 0..100 {
            assert!(tr.translate(&rest(i * 10), 0.01).is_empty());
        }
    }

    #[test]
    fn tilt_past_threshold_moves_at_speed() {
        let mut tr = pointing();
        let f = FilteredFrame {
            ax: 301.0,
            ..rest(20)
        };
        let ev = tr.translate(&f, 0.02);
        assert_eq!(
            ev,
            vec![ControlEvent::new(
                20,
                EventKind::PointerDelta { dx: 10.0, dy: 0.0 }
            )]
        );
    }

    #[test]
    fn threshold_equality_does_not_trigger() {
        let mut tr = pointing();
        let f = FilteredFrame {
            ax: 300.0,
            ay: -300.0,
            stretch: 600.0,
            ..rest(20)
        };
        assert!(tr.translate(&f, 0.02).is_empty());
    }

    #[test]
    fn diagonal_emits_one_event_per_axis() {
        let mut tr = pointing();
        let f = FilteredFrame {
            ax: -900.0,
            ay: 900.0,
            ..rest(10)
        };
        let ev = tr.translate(&f, 0.01);
        assert_eq!(
            ev.iter().map(|e| e.kind).collect::<Vec<_>>(),
            vec![
                EventKind::PointerDelta { dx: -5.0, dy: 0.0 },
                EventKind::PointerDelta { dx: 0.0, dy: 5.0 }
            ]
        );
    }

    #[test]
    fn stretch_ramp_gives_one_click() {
        // Hand-traced hysteresis table for press=600, release=450:
        //   300..=600 idle, 610 press, ..800.. held, 440 release, ..300 idle.
        let mut tr = pointing();
        let mut ramp: Vec<f64> = (0..=50).map(|i| 300.0 + 10.0 * i as f64).collect();
        ramp.extend((0..50).map(|i| 790.0 - 10.0 * i as f64));
        let mut kinds = Vec::new();
        let mut press_at = None;
        let mut release_at = None;
        for (i, s) in ramp.iter().enumerate() {
            let f = FilteredFrame {
                stretch: *s,
                ..rest(i as u32 * 10)
            };
            for e in tr.translate(&f, 0.01) {
                match e.kind {
                    EventKind::ClickPress => press_at = Some(*s),
                    EventKind::ClickRelease => release_at = Some(*s),
                    _ => {}
                }
                kinds.push(e.kind);
            }
        }
        assert_eq!(kinds, vec![EventKind::ClickPress, EventKind::ClickRelease]);
        assert_eq!(press_at, Some(610.0));
        assert_eq!(release_at, Some(440.0));
    }

    #[test]
    fn arm_mode_stretch_drives_z() {
        let mut tr = Translator::new(CalibrationProfile::default(), ActiveMode::Arm3d).unwrap();
        let up = FilteredFrame {
            stretch: 700.0,
            ..rest(10)
        };
        let hold = FilteredFrame {
            stretch: 500.0,
            ..rest(20)
        };
        let down = FilteredFrame {
            stretch: 100.0,
            ..rest(30)
        };
        let dz = |f: &FilteredFrame, tr: &mut Translator| match tr.translate(f, 0.01)[..] {
            [ControlEvent {
                kind: EventKind::ZDelta { dz },
                ..
            }] => dz,
            ref other => panic!("{other:?}"),
        };
        assert!((dz(&up, &mut tr) - 0.001).abs() < 1e-15);
        // Still inside the hysteresis band: keeps driving +Z.
        assert!((dz(&hold, &mut tr) - 0.001).abs() < 1e-15);
        assert!((dz(&down, &mut tr) + 0.001).abs() < 1e-15);
        assert!(tr.translate(&rest(40), 0.01).is_empty());
    }

    #[test]
    fn button_toggles_with_debounce() {
        let mut tr = pointing();
        let press = |t| FilteredFrame {
            button: true,
            ..rest(t)
        };
        // Bounce: edges at 0, 20, 40 ms with 50 ms debounce collapse into one.
        let mut toggles = 0;
        for (t, b) in [
            (0, true),
            (10, false),
            (20, true),
            (30, false),
            (40, true),
            (200, false),
        ] {
            let f = if b { press(t) } else { rest(t) };
            toggles += tr
                .translate(&f, 0.01)
                .iter()
                .filter(|e| e.kind == EventKind::ModeToggle)
                .count();
        }
        assert_eq!(toggles, 1);
        assert_eq!(tr.mode(), Mode::Released);
        let moving = FilteredFrame {
            ax: 900.0,
            stretch: 900.0,
            ..rest(300)
        };
        assert!(tr.translate(&moving, 0.01).is_empty());
        let ev = tr.translate(&press(400), 0.01);
        assert_eq!(ev[0].kind, EventKind::ModeToggle);
        assert_eq!(tr.mode(), Mode::Pointing);
    }

    #[test]
    fn release_toggle_closes_open_click() {
        let mut tr = pointing();
        let f = FilteredFrame {
            stretch: 800.0,
            ..rest(10)
        };
        assert_eq!(tr.translate(&f, 0.01)[0].kind, EventKind::ClickPress);
        let ev = tr.translate(&FilteredFrame { button: true, ..f }, 0.01);
        assert_eq!(
            ev.iter().map(|e| e.kind).collect::<Vec<_>>(),
            vec![EventKind::ModeToggle, EventKind::ClickRelease]
        );
        assert!(!tr.click_down());
    }

    #[test]
    fn uncalibrated_profile_rejected() {
        let bad = CalibrationProfile {
            tilt_neg_x: 500.0,
            ..Default::default()
        };
        assert!(Translator::new(bad, ActiveMode::Pointing).is_err());
    }

    #[test]
    fn event_json_shape() {
        let e = ControlEvent::new(7, EventKind::PointerDelta { dx: 1.5, dy: 0.0 });
        let s = serde_json::to_string(&e).unwrap();
        assert_eq!(s, r#"{"t_ms":7,"type":"pointer_delta","dx":1.5,"dy":0.0}"#);
        assert_eq!(serde_json::from_str::<ControlEvent>(&s).unwrap(), e);
    }
}
