//! Trap layout: two particles on the lab x′-axis with a vibrating shield
//! membrane between them.
//!
//! The particles sit at lab positions ±L (half-separation L), each
//! delocalised along a trap axis tilted by θ from the lab x′-axis:
//!
//! * **linear** orientation θ = π/2: delocalisation along the separation
//!   axis (head-to-tail), maximising the gravitational phase rate;
//! * **parallel** orientation θ = 0: delocalisation transverse to the
//!   separation axis.
//!
//! A circular membrane of radius r_s and thickness d_s is clamped midway
//! between the particles. Two gap distances control the shield-mediated
//! couplings:
//!
//! ```text
//! d₀       = L − R − d_s/2   (surface-to-surface, Casimir),
//! d₀,mag   = L − d_s/2       (centre-to-surface, magnetic dipole image),
//! ```
//!
//! with R the particle radius. Validation enforces d₀ > 0 so the spheres
//! never intersect the membrane.

use crate::error::{CoreError, Result};

/// Orientation of the two delocalisation axes relative to the lab frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Orientation {
    /// Both axes along the separation direction (θ_A = θ_B = π/2).
    Linear,
    /// Both axes transverse to the separation direction (θ_A = θ_B = 0).
    Parallel,
    /// Arbitrary tilt angles in radians.
    Custom { theta_a: f64, theta_b: f64 },
}

impl Orientation {
    /// Tilt angles (θ_A, θ_B) in radians.
    pub fn angles(&self) -> (f64, f64) {
        match *self {
            Orientation::Linear => (std::f64::consts::FRAC_PI_2, std::f64::consts::FRAC_PI_2),
            Orientation::Parallel => (0.0, 0.0),
            Orientation::Custom { theta_a, theta_b } => (theta_a, theta_b),
        }
    }

    /// Parse from a CLI/config token.
    pub fn parse(token: &str) -> Result<Self> {
        match token.to_ascii_lowercase().as_str() {
            "linear" => Ok(Orientation::Linear),
            "parallel" => Ok(Orientation::Parallel),
            other => Err(CoreError::InvalidParameter(format!(
                "unknown orientation `{other}` (expected `linear` or `parallel`)"
            ))),
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Orientation::Linear => "linear",
            Orientation::Parallel => "parallel",
            Orientation::Custom { .. } => "custom",
        }
    }
}

/// Geometric layout of the two-particle + shield arrangement.
#[derive(Debug, Clone, PartialEq)]
pub struct Geometry {
    /// Half-separation L in m (particles at ±L on the lab axis).
    pub half_separation: f64,
    /// Particle radius R in m (spheres assumed identical in size).
    pub particle_radius: f64,
    /// Shield membrane thickness d_s in m.
    pub shield_thickness: f64,
    /// Shield membrane radius r_s in m.
    pub shield_radius: f64,
    /// Delocalisation-axis orientation.
    pub orientation: Orientation,
}

impl Geometry {
    /// Reference layout: L = 20 µm, R = 10 µm, d_s = 2 µm, r_s = 1 cm.
    pub fn reference() -> Self {
        Self {
            half_separation: 20e-6,
            particle_radius: 10e-6,
            shield_thickness: 2e-6,
            shield_radius: 1e-2,
            orientation: Orientation::Linear,
        }
    }

    pub fn with_orientation(mut self, orientation: Orientation) -> Self {
        self.orientation = orientation;
        self
    }

    /// Centre-to-centre separation 2L.
    pub fn separation(&self) -> f64 {
        2.0 * self.half_separation
    }

    /// Sphere-surface to shield-surface gap d₀ = L − R − d_s/2 (Casimir).
    pub fn gap_casimir(&self) -> f64 {
        self.half_separation - self.particle_radius - 0.5 * self.shield_thickness
    }

    /// Sphere-centre to shield-surface gap d₀,mag = L − d_s/2 (magnetic).
    pub fn gap_magnetic(&self) -> f64 {
        self.half_separation - 0.5 * self.shield_thickness
    }

    pub fn validate(&self) -> Result<()> {
        for (label, v, strictly_positive) in [
            ("half-separation", self.half_separation, true),
            ("particle radius", self.particle_radius, true),
            ("shield thickness", self.shield_thickness, false),
            ("shield radius", self.shield_radius, true),
        ] {
            if !v.is_finite() || v < 0.0 || (strictly_positive && v == 0.0) {
                return Err(CoreError::Geometry(format!(
                    "{label} must be {} and finite, got {v}",
                    if strictly_positive { "positive" } else { "non-negative" }
                )));
            }
        }
        if self.gap_casimir() <= 0.0 {
            return Err(CoreError::Geometry(format!(
                "particles intersect the shield: L − R − d_s/2 = {:.3e} ≤ 0 \
                 (L = {:.3e}, R = {:.3e}, d_s = {:.3e})",
                self.gap_casimir(),
                self.half_separation,
                self.particle_radius,
                self.shield_thickness
            )));
        }
        let (ta, tb) = self.orientation.angles();
        if !ta.is_finite() || !tb.is_finite() {
            return Err(CoreError::Geometry(
                "orientation angles must be finite".into(),
            ));
        }
        Ok(())
    }
}
