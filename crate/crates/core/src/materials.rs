//! Material properties for levitated particles and shield membranes.
//!
//! Two particle species are supported out of the box:
//!
//! * **silica** — a dielectric (ε_r = 3.9) with weak diamagnetic
//!   susceptibility χ_V = −1.4·10⁻⁵, suited to optical or Paul traps;
//! * **lead** — superconducting below T_c, modelled as a perfect conductor
//!   and perfect diamagnet (χ_V = −1), suited to magnetic levitation.
//!
//! Shield membranes additionally carry elastic data (Young's modulus E,
//! Poisson ratio ν) for the vibrational-mode spectrum, plus conductivity σ
//! (normal metals) or London penetration depth λ_L (superconductors) for
//! the screening estimates.
//!
//! The Casimir response enters through φ(ε_r) = χ(ε_r)·(ε_r − 1)/(ε_r + 1)
//! where χ is a slowly varying tabulated coefficient (χ → 0.46 as ε_r → 1,
//! χ = 1 for a perfect conductor). Only tabulated permittivities are
//! accepted; interpolation would silently mis-scale the Casimir coupling η,
//! so unknown values are rejected instead.

use crate::error::{CoreError, Result};

/// Relative permittivity of a particle or shield material.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Permittivity {
    /// Finite relative permittivity ε_r ≥ 1.
    Finite(f64),
    /// Idealised perfect conductor (ε_r → ∞).
    PerfectConductor,
}

/// Bulk properties of a material used for particles and/or shields.
#[derive(Debug, Clone, PartialEq)]
pub struct Material {
    /// Human-readable identifier (appears in CLI metadata).
    pub name: &'static str,
    /// Mass density ρ in kg/m³.
    pub density: f64,
    /// Relative permittivity ε_r.
    pub permittivity: Permittivity,
    /// Magnetic volume susceptibility χ_V (dimensionless, < 0 diamagnetic).
    pub volume_susceptibility: f64,
    /// Young's modulus E in Pa (shield membranes only).
    pub youngs_modulus: Option<f64>,
    /// Poisson ratio ν (shield membranes only).
    pub poisson_ratio: Option<f64>,
    /// Electrical conductivity σ in S/m (normal-metal shields only).
    pub conductivity: Option<f64>,
    /// London penetration depth λ_L in m (superconducting shields only).
    pub london_depth: Option<f64>,
}

impl Material {
    /// Fused silica (SiO₂) particle material.
    pub fn silica() -> Self {
        Self {
            name: "silica",
            density: 2650.0,
            permittivity: Permittivity::Finite(3.9),
            volume_susceptibility: -1.4e-5,
            youngs_modulus: None,
            poisson_ratio: None,
            conductivity: None,
            london_depth: None,
        }
    }

    /// Superconducting lead particle material (perfect diamagnet, χ_V = −1).
    pub fn lead() -> Self {
        Self {
            name: "lead",
            density: 11340.0,
            permittivity: Permittivity::PerfectConductor,
            volume_susceptibility: -1.0,
            youngs_modulus: None,
            poisson_ratio: None,
            conductivity: None,
            london_depth: None,
        }
    }

    /// Copper shield membrane (normal metal).
    pub fn copper() -> Self {
        Self {
            name: "copper",
            density: 8960.0,
            permittivity: Permittivity::PerfectConductor,
            volume_susceptibility: -9.6e-6,
            youngs_modulus: Some(110e9),
            poisson_ratio: Some(1.0 / 3.0),
            conductivity: Some(1.5e10),
            london_depth: None,
        }
    }

    /// Niobium shield membrane (superconducting, λ_L = 40 nm).
    pub fn niobium() -> Self {
        Self {
            name: "niobium",
            density: 8582.0,
            permittivity: Permittivity::PerfectConductor,
            volume_susceptibility: -1.0,
            youngs_modulus: Some(105e9),
            poisson_ratio: Some(0.40),
            conductivity: None,
            london_depth: Some(40e-9),
        }
    }

    /// Look up a material preset by name (case-insensitive).
    pub fn by_name(name: &str) -> Result<Self> {
        match name.to_ascii_lowercase().as_str() {
            "silica" | "sio2" => Ok(Self::silica()),
            "lead" | "pb" => Ok(Self::lead()),
            "copper" | "cu" => Ok(Self::copper()),
            "niobium" | "nb" => Ok(Self::niobium()),
            other => Err(CoreError::UnsupportedMaterial(format!(
                "unknown material `{other}` (expected silica, lead, copper or niobium)"
            ))),
        }
    }

    /// Casimir response φ(ε_r) = χ(ε_r)·(ε_r − 1)/(ε_r + 1).
    ///
    /// χ is tabulated only at ε_r ∈ {1, 3.9, ∞}; other permittivities are
    /// rejected rather than interpolated.
    #[allow(clippy::redundant_guards)] // float literal patterns are not allowed
    pub fn casimir_response(&self) -> Result<f64> {
        match self.permittivity {
            Permittivity::PerfectConductor => Ok(1.0),
            Permittivity::Finite(e) if e == 1.0 => Ok(0.0),
            Permittivity::Finite(e) if e == 3.9 => Ok((e - 1.0) / (e + 1.0) * 0.5),
            Permittivity::Finite(e) => Err(CoreError::UnsupportedMaterial(format!(
                "no tabulated Casimir coefficient χ(ε_r) at ε_r = {e}; \
                 supported values are 1, 3.9 and a perfect conductor"
            ))),
        }
    }

    /// Clausius–Mossotti factor (ε_r − 1)/(ε_r + 2) for induced-dipole
    /// estimates; 1 for a perfect conductor.
    pub fn clausius_mossotti(&self) -> f64 {
        match self.permittivity {
            Permittivity::PerfectConductor => 1.0,
            Permittivity::Finite(e) => (e - 1.0) / (e + 2.0),
        }
    }

    /// Bending-wave speed scale √(E/(12ρ(1 − ν²))) of a thin plate, in m/s.
    pub fn plate_speed(&self) -> Result<f64> {
        let e = self.youngs_modulus.ok_or_else(|| {
            CoreError::UnsupportedMaterial(format!(
                "material `{}` has no Young's modulus; not usable as a shield membrane",
                self.name
            ))
        })?;
        let nu = self.poisson_ratio.ok_or_else(|| {
            CoreError::UnsupportedMaterial(format!(
                "material `{}` has no Poisson ratio; not usable as a shield membrane",
                self.name
            ))
        })?;
        Ok((e / (12.0 * self.density * (1.0 - nu * nu))).sqrt())
    }

    /// Validate physical ranges.
    pub fn validate(&self) -> Result<()> {
        if !(self.density.is_finite() && self.density > 0.0) {
            return Err(CoreError::InvalidParameter(format!(
                "density must be positive and finite, got {}",
                self.density
            )));
        }
        if let Permittivity::Finite(e) = self.permittivity {
            if !(e.is_finite() && e >= 1.0) {
                return Err(CoreError::InvalidParameter(format!(
                    "relative permittivity must satisfy ε_r ≥ 1, got {e}"
                )));
            }
        }
        if let Some(nu) = self.poisson_ratio {
            if !(-1.0..0.5).contains(&nu) {
                return Err(CoreError::InvalidParameter(format!(
                    "Poisson ratio must lie in [−1, ½), got {nu}"
                )));
            }
        }
        for (label, v) in [
            ("Young's modulus", self.youngs_modulus),
            ("conductivity", self.conductivity),
            ("London depth", self.london_depth),
        ] {
            if let Some(v) = v {
                if !(v.is_finite() && v > 0.0) {
                    return Err(CoreError::InvalidParameter(format!(
                        "{label} must be positive and finite, got {v}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// A levitated spherical particle.
#[derive(Debug, Clone, PartialEq)]
pub struct Particle {
    pub material: Material,
    /// Sphere radius R in m.
    pub radius: f64,
}

impl Particle {
    pub fn new(material: Material, radius: f64) -> Result<Self> {
        material.validate()?;
        if !(radius.is_finite() && radius > 0.0) {
            return Err(CoreError::InvalidParameter(format!(
                "particle radius must be positive and finite, got {radius}"
            )));
        }
        Ok(Self { material, radius })
    }

    /// Sphere mass M = ρ·(4/3)πR³ in kg.
    pub fn mass(&self) -> f64 {
        self.material.density * 4.0 / 3.0 * std::f64::consts::PI * self.radius.powi(3)
    }
}
