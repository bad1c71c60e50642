use serde::{Deserialize, Serialize};

pub const ANGLES_DEG: [u16; 8] = [0, 45, 90, 135, 180, 225, 270, 315];
pub const WIDTHS_PX: [f64; 2] = [30.0, 61.0];
pub const DISTANCES_PX: [f64; 3] = [122.0, 244.0, 300.0];

pub const WORKSPACE_M: f64 = 1.0;
pub const SPHERE_RADIUS_M: f64 = 0.05;
pub const START_CENTER_M: [f64; 3] = [0.5, 0.5, 0.5];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Screen {
    pub width: f64,
    pub height: f64,
}

impl Default for Screen {
    fn default() -> Self {
        Self {
            width: 1280.0,
            height: 800.0,
        }
    }
}

impl Screen {
    pub fn center(&self) -> [f64; 2] {
        [self.width / 2.0, self.height / 2.0]
    }

    pub fn clamp(&self, p: [f64; 2]) -> [f64; 2] {
        [p[0].clamp(0.0, self.width), p[1].clamp(0.0, self.height)]
    }
}

/// Nominal (distance, width) cell a reach is analysed under.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Condition {
    pub distance: f64,
    pub width: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetSpec2D {
    pub angle_deg: u16,
    /// Disk diameter, px.
    pub width: f64,
    /// Distance of the disk center from the screen center, px (0 for the center target).
    pub distance: f64,
    pub is_center: bool,
}

impl TargetSpec2D {
    pub fn center_target(width: f64) -> Self {
        Self {
            angle_deg: 0,
            width,
            distance: 0.0,
            is_center: true,
        }
    }

    pub fn position(&self, screen: &Screen) -> [f64; 2] {
        let [cx, cy] = screen.center();
        if self.is_center {
            return [cx, cy];
        }
        let th = (self.angle_deg as f64).to_radians();
        [cx + self.distance * th.cos(), cy + self.distance * th.sin()]
    }

    /// Strict interior test: a point on the rim is outside.
    pub fn contains(&self, screen: &Screen, p: [f64; 2]) -> bool {
        let c = self.position(screen);
        (p[0] - c[0]).hypot(p[1] - c[1]) < self.width / 2.0
    }
}

/// The 48 peripheral targets (orientation × width × distance) plus the
/// center once per width: 50 in total.
pub fn generate_target_set_2d() -> Vec<TargetSpec2D> {
    let mut out = peripheral_targets();
    out.extend(WIDTHS_PX.iter().map(|&w| TargetSpec2D::center_target(w)));
    out
}

pub fn peripheral_targets() -> Vec<TargetSpec2D> {
    let mut out = Vec::with_capacity(48);
    for &angle_deg in &ANGLES_DEG {
        for &width in &WIDTHS_PX {
            for &distance in &DISTANCES_PX {
                out.push(TargetSpec2D {
                    angle_deg,
                    width,
                    distance,
                    is_center: false,
                });
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetSpec3D {
    pub center: [f64; 3],
    pub radius: f64,
}

impl TargetSpec3D {
    pub fn start() -> Self {
        Self {
            center: START_CENTER_M,
            radius: SPHERE_RADIUS_M,
        }
    }

    pub fn contains(&self, p: [f64; 3]) -> bool {
        dist3(self.center, p) < self.radius
    }
}

pub fn dist3(a: [f64; 3], b: [f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

/// 18 reach targets around the start sphere: two horizontal rings of eight
/// (radius 0.3 m at heights 0.35 m and 0.65 m) and two polar targets on the
/// vertical axis (0.1 m and 0.9 m).
pub fn generate_target_set_3d() -> Vec<TargetSpec3D> {
    let [cx, cy, _] = START_CENTER_M;
    let mut out = Vec::with_capacity(18);
    for z in [0.35, 0.65] {
        for k in 0..8 {
            let th = (k as f64 * 45.0).to_radians();
            out.push(TargetSpec3D {
                center: [cx + 0.3 * th.cos(), cy + 0.3 * th.sin(), z],
                radius: SPHERE_RADIUS_M,
            });
        }
    }
    for z in [0.1, 0.9] {
        out.push(TargetSpec3D {
            center: [cx, cy, z],
            radius: SPHERE_RADIUS_M,
        });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fifty_targets() {
        let all = generate_target_set_2d();
        assert_eq!(all.len(), 50);
        assert_eq!(all.iter().filter(|t| !t.is_center).count(), 48);
    }

    #[test]
    fn polar_placement() {
        let screen = Screen::default();
        let t = TargetSpec2D {
            angle_deg: 0,
            width: 30.0,
            distance: 122.0,
            is_center: false,
        };
        let [cx, cy] = screen.center();
        assert_eq!(t.position(&screen), [cx + 122.0, cy]);
        let up = TargetSpec2D { angle_deg: 90, ..t };
        let p = up.position(&screen);
        assert!((p[0] - cx).abs() < 1e-12 && (p[1] - (cy + 122.0)).abs() < 1e-12);
    }

    #[test]
    fn rim_is_outside() {
        let screen = Screen::default();
        let t = TargetSpec2D::center_target(30.0);
        let [cx, cy] = screen.center();
        assert!(t.contains(&screen, [cx + 14.999, cy]));
        assert!(!t.contains(&screen, [cx + 15.0, cy]));
        assert!(!t.contains(&screen, [cx + 16.0, cy]));
    }

    #[test]
    fn every_target_fits_on_screen() {
        let screen = Screen::default();
        for t in generate_target_set_2d() {
            let [x, y] = t.position(&screen);
            let r = t.width / 2.0;
            assert!(
                x - r >= 0.0 && x + r <= screen.width && y - r >= 0.0 && y + r <= screen.height
            );
        }
    }

    #[test]
    fn arm_layout_inside_cube_and_disjoint() {
        let all = generate_target_set_3d();
        assert_eq!(all.len(), 18);
        let start = TargetSpec3D::start();
        for (i, a) in all.iter().enumerate() {
            assert!(a
                .center
                .iter()
                .all(|&c| c - a.radius >= 0.0 && c + a.radius <= WORKSPACE_M));
            assert!(dist3(a.center, start.center) > a.radius + start.radius);
            for b in &all[i + 1..] {
                assert!(dist3(a.center, b.center) > a.radius + b.radius);
            }
        }
    }
}
