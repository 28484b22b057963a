//! Penalty-based ground contact: spring-damper normal force with Coulomb
//! friction on the plane z = 0.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroundParams {
    /// Normal spring stiffness (N/m).
    pub k_normal: f64,
    /// Normal damping (N·s/m).
    pub c_normal: f64,
    /// Tangential viscous coefficient (N·s/m), saturated by the friction cone.
    pub k_tangent: f64,
    /// Stick-phase anchor spring used by the stepper for foot contacts (N/m).
    pub stick_stiffness: f64,
    /// Stick-phase anchor damping (N·s/m).
    pub stick_damping: f64,
    /// Contact flag threshold (N), matching the collision reward convention.
    pub contact_threshold: f64,
}

impl Default for GroundParams {
    fn default() -> Self {
        Self {
            k_normal: 2.0e4,
            c_normal: 200.0,
            k_tangent: 500.0,
            stick_stiffness: 8.0e3,
            stick_damping: 30.0,
            contact_threshold: 0.1,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ContactForce {
    /// Upward normal force (N), >= 0.
    pub normal: f64,
    /// Horizontal friction force (N).
    pub tangent: f64,
    /// True when the normal force exceeds the contact threshold.
    pub active: bool,
}

/// Contact force at a point with world position `(_, z)` and velocity
/// `(vx, vz)`, under friction coefficient `mu`.
pub fn contact_force(z: f64, vx: f64, vz: f64, ground: &GroundParams, mu: f64) -> ContactForce {
    let penetration = (-z).max(0.0);
    if penetration <= 0.0 {
        return ContactForce::default();
    }
    let normal = (ground.k_normal * penetration - ground.c_normal * vz).max(0.0);
    let tangent = (-ground.k_tangent * vx).clamp(-mu * normal, mu * normal);
    ContactForce {
        normal,
        tangent,
        active: normal > ground.contact_threshold,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn foot_above_ground_has_no_force() {
        let f = contact_force(0.01, 1.0, -2.0, &GroundParams::default(), 0.8);
        assert_eq!(f, ContactForce::default());
        assert!(!f.active);
    }

    #[test]
    fn static_penetration_follows_the_spring_law() {
        let gp = GroundParams::default();
        let p = 0.004;
        let f = contact_force(-p, 0.0, 0.0, &gp, 0.8);
        assert!((f.normal - gp.k_normal * p).abs() < 1e-12);
        assert_eq!(f.tangent, 0.0);
        assert!(f.active);
    }

    #[test]
    fn fast_sliding_saturates_the_friction_cone() {
        let gp = GroundParams::default();
        let mu = 0.6;
        let f = contact_force(-0.005, 3.0, 0.0, &gp, mu);
        assert!((f.tangent.abs() - mu * f.normal).abs() < 1e-12);
        assert!(f.tangent < 0.0, "friction opposes sliding");
    }

    #[test]
    fn separating_velocity_cannot_pull_downward() {
        let gp = GroundParams::default();
        let f = contact_force(-0.001, 0.0, 5.0, &gp, 0.8);
        assert_eq!(f.normal, 0.0);
        assert!(!f.active);
    }

    #[test]
    fn contact_flag_matches_threshold() {
        let gp = GroundParams::default();
        // Tiny penetration: positive normal below the 0.1 N threshold.
        let f = contact_force(-1e-6, 0.0, 0.0, &gp, 0.8);
        assert!(f.normal > 0.0 && f.normal < gp.contact_threshold);
        assert!(!f.active);
    }
}
