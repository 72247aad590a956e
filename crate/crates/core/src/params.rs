//! Coupling constants, experimental design bounds and rate estimators.
//!
//! Expanding the pair potentials about the trap minima yields three
//! quadratic coupling strengths with units J/m²:
//!
//! ```text
//! λ = G M_A M_B / 4L³              (gravity),
//! η = ħcπ³ R φ(ε_r) / 720 d₀⁴      (Casimir, particle–shield),
//! δ = 2µ₀ m² / 32π d₀,mag⁵         (magnetic dipole, particle–image),
//! ```
//!
//! with d₀ = L − R − d_s/2 and d₀,mag = L − d_s/2 the two gap distances
//! and m the induced magnetic dipole moment of a diamagnetic sphere in a
//! bias field B. The natural entangling time scale is t₀ = ħ/(λ·Δx²).
//!
//! The design-bound estimators answer the feasibility questions: how thick
//! and wide the conducting shield must be so that every screened
//! non-gravitational channel entangles slower than gravity, how strongly a
//! bias field may leak into the trap region, and how much delocalisation
//! (squeezing) a target negativity demands. Electromagnetic screening of a
//! thin conductor enters through the transmission factor 𝒯 = 2/(Z₀σ_c d_s)
//! (fields through a superconductor decay as e^{−d_s/λ_L} instead).
//!
//! All estimators are pure functions of their arguments; identical inputs
//! give bitwise-identical outputs.

use crate::constants::{C, EPS0, G, G_ACC, HBAR, MU0, Z0};
use crate::error::{CoreError, Result};
use crate::geometry::Geometry;
use crate::materials::{Material, Particle};

/// Assembled quadratic coupling strengths for one scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingSet {
    /// Gravitational coupling λ in J/m².
    pub lambda: f64,
    /// Casimir (particle–shield) coupling η in J/m².
    pub eta: f64,
    /// Magnetic-dipole (particle–image) coupling δ in J/m².
    pub delta: f64,
    /// Induced magnetic dipole moment |m| in A·m².
    pub dipole_moment: f64,
    /// Casimir gap d₀ = L − R − d_s/2 in m.
    pub d0_casimir: f64,
    /// Magnetic gap d₀,mag = L − d_s/2 in m.
    pub d0_mag: f64,
}

/// Gravitational coupling λ = G·M_A·M_B/(4L³) in J/m².
pub fn coupling_lambda(geom: &Geometry, mass_a: f64, mass_b: f64) -> Result<f64> {
    geom.validate()?;
    if !(mass_a > 0.0 && mass_b > 0.0 && mass_a.is_finite() && mass_b.is_finite()) {
        return Err(CoreError::InvalidParameter(format!(
            "particle masses must be positive, got {mass_a} and {mass_b}"
        )));
    }
    let l = geom.half_separation;
    Ok(G * mass_a * mass_b / (4.0 * l * l * l))
}

/// Casimir coupling η = ħcπ³R·φ(ε_r)/(720·d₀⁴) in J/m².
pub fn coupling_eta(geom: &Geometry, material: &Material) -> Result<f64> {
    geom.validate()?;
    let phi = material.casimir_response()?;
    let d0 = geom.gap_casimir();
    Ok(HBAR * C * std::f64::consts::PI.powi(3) * geom.particle_radius * phi / (720.0 * d0.powi(4)))
}

/// Induced dipole moment |m| = 4πR³|χ_V|B/(3µ₀) and coupling
/// δ = 2µ₀m²/(32π·d₀,mag⁵).
pub fn induced_dipole_and_delta(
    geom: &Geometry,
    material: &Material,
    b_ext: f64,
) -> Result<(f64, f64)> {
    geom.validate()?;
    if !(b_ext.is_finite() && b_ext >= 0.0) {
        return Err(CoreError::InvalidParameter(format!(
            "bias field must be non-negative, got {b_ext}"
        )));
    }
    let r = geom.particle_radius;
    let m = 4.0 * std::f64::consts::PI * r.powi(3) * material.volume_susceptibility.abs() * b_ext
        / (3.0 * MU0);
    let d0m = geom.gap_magnetic();
    let delta = 2.0 * MU0 * m * m / (32.0 * std::f64::consts::PI * d0m.powi(5));
    Ok((m, delta))
}

/// Assemble the full coupling set for a pair of identical particles.
pub fn coupling_set(geom: &Geometry, particle: &Particle, b_ext: f64) -> Result<CouplingSet> {
    let mass = particle.mass();
    let lambda = coupling_lambda(geom, mass, mass)?;
    let eta = coupling_eta(geom, &particle.material)?;
    let (dipole_moment, delta) = induced_dipole_and_delta(geom, &particle.material, b_ext)?;
    Ok(CouplingSet {
        lambda,
        eta,
        delta,
        dipole_moment,
        d0_casimir: geom.gap_casimir(),
        d0_mag: geom.gap_magnetic(),
    })
}

/// Characteristic entangling time t₀ = ħ/(λ·Δx²).
pub fn interaction_time(lambda: f64, delta_x: f64) -> Result<f64> {
    if !(lambda > 0.0 && delta_x > 0.0) {
        return Err(CoreError::InvalidParameter(format!(
            "interaction time needs λ > 0 and Δx > 0, got λ = {lambda}, Δx = {delta_x}"
        )));
    }
    Ok(HBAR / (lambda * delta_x * delta_x))
}

/// Diamagnetic levitation field B = g·ρ·µ₀/(|χ_V|·∂B).
pub fn levitation_field(material: &Material, gradient: f64) -> Result<f64> {
    if material.volume_susceptibility >= 0.0 {
        return Err(CoreError::UnsupportedMaterial(format!(
            "diamagnetic levitation requires χ_V < 0; material `{}` has χ_V = {}",
            material.name, material.volume_susceptibility
        )));
    }
    if !(gradient.is_finite() && gradient > 0.0) {
        return Err(CoreError::InvalidParameter(format!(
            "field gradient must be positive, got {gradient}"
        )));
    }
    Ok(G_ACC * material.density * MU0 / (material.volume_susceptibility.abs() * gradient))
}

/// Superconducting film thickness d_s = λ_L·ln(B_trap/B_target) needed to
/// attenuate B_trap down to B_target. Returns `(d_s, attenuated)`;
/// `attenuated = false` (with d_s = 0) when no suppression is needed.
pub fn superconducting_thickness(
    london_depth: f64,
    b_trap: f64,
    b_target: f64,
) -> Result<(f64, bool)> {
    if !(london_depth > 0.0 && b_trap > 0.0 && b_target > 0.0) {
        return Err(CoreError::InvalidParameter(format!(
            "superconducting thickness needs positive λ_L, B_trap, B_target; \
             got {london_depth}, {b_trap}, {b_target}"
        )));
    }
    if b_target >= b_trap {
        return Ok((0.0, false));
    }
    Ok((london_depth * (b_trap / b_target).ln(), true))
}

/// Phase accumulation rate Γ = 2·Δx·M·g_ext/ħ of a superposition in a
/// uniform external acceleration field (e.g. solar tides).
pub fn external_gravity_phase_rate(delta_x: f64, mass: f64, g_ext: f64) -> Result<f64> {
    for (label, v) in [("Δx", delta_x), ("mass", mass), ("g_ext", g_ext)] {
        if !(v.is_finite() && v >= 0.0) {
            return Err(CoreError::InvalidParameter(format!(
                "{label} must be non-negative, got {v}"
            )));
        }
    }
    Ok(2.0 * delta_x * mass * g_ext / HBAR)
}

/// Delocalisation requirement for a target negativity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SqueezingRequirement {
    /// Required Δx/x₀ (> 1 means expansion beyond the ground-state width).
    pub ratio: f64,
    /// Squeezing parameter r = −ln(Δx/x₀).
    pub r: f64,
    /// The same in decibel, 20·r/ln(10).
    pub db: f64,
}

/// Minimum delocalisation Δx/x₀ = √(3·L₀³·ω·E_N,min·ln2/(G·π·ρ·τ)) for
/// reaching negativity E_N,min within coherence time τ at trap frequency ω,
/// dimensionless separation L₀ = L/R and particle density ρ.
pub fn min_squeezing(
    l0: f64,
    omega: f64,
    en_min: f64,
    tau: f64,
    density: f64,
) -> Result<SqueezingRequirement> {
    for (label, v) in [
        ("L₀", l0),
        ("ω", omega),
        ("E_N,min", en_min),
        ("τ", tau),
        ("ρ", density),
    ] {
        if !(v.is_finite() && v > 0.0) {
            return Err(CoreError::InvalidParameter(format!(
                "{label} must be positive, got {v}"
            )));
        }
    }
    let ratio = (3.0 * l0.powi(3) * omega * en_min * std::f64::consts::LN_2
        / (G * std::f64::consts::PI * density * tau))
        .sqrt();
    let r = -ratio.ln();
    Ok(SqueezingRequirement {
        ratio,
        r,
        db: 20.0 * r / std::f64::consts::LN_10,
    })
}

/// Entanglement-rate estimators for the interaction hierarchy.
///
/// Each rate is the characteristic d(E_N)/dt of the corresponding pair
/// interaction for delocalisations Δx_A, Δx_B at half-separation L;
/// screened channels carry the thin-conductor transmission 𝒯 once
/// (Coulomb) or squared (Casimir, electric dipole).
pub mod rates {
    use super::*;

    const LOG2: f64 = std::f64::consts::LN_2;

    /// Thin-conductor field transmission 𝒯 = 2/(Z₀·σ_c·d_s), clamped to 1.
    pub fn transmission(conductivity: f64, thickness: f64) -> Result<f64> {
        if !(conductivity > 0.0 && thickness > 0.0) {
            return Err(CoreError::InvalidParameter(format!(
                "transmission needs positive conductivity and thickness, \
                 got σ_c = {conductivity}, d_s = {thickness}"
            )));
        }
        Ok((2.0 / (Z0 * conductivity * thickness)).min(1.0))
    }

    /// Γ_Gravity = G·M_A·M_B·Δx_A·Δx_B/(2ħ·ln2·L³).
    pub fn gravity(mass_a: f64, mass_b: f64, dx_a: f64, dx_b: f64, l: f64) -> f64 {
        G * mass_a * mass_b * dx_a * dx_b / (2.0 * HBAR * LOG2 * l.powi(3))
    }

    /// Γ_Casimir = 𝒯²·161·c·R⁶·Δx_A·Δx_B·((ε_r−1)/(ε_r+2))²/(128π·ln2·L⁹).
    pub fn casimir(t: f64, radius: f64, cm_factor: f64, dx_a: f64, dx_b: f64, l: f64) -> f64 {
        t * t * 161.0 * C * radius.powi(6) * dx_a * dx_b * cm_factor * cm_factor
            / (128.0 * std::f64::consts::PI * LOG2 * l.powi(9))
    }

    /// Γ_Coulomb = 𝒯·|q_A·q_B|·Δx_A·Δx_B/(8πε₀·ħ·ln2·L³).
    pub fn coulomb(t: f64, q_a: f64, q_b: f64, dx_a: f64, dx_b: f64, l: f64) -> f64 {
        t * (q_a * q_b).abs() * dx_a * dx_b
            / (8.0 * std::f64::consts::PI * EPS0 * HBAR * LOG2 * l.powi(3))
    }

    /// Γ_elec.Dipole = 𝒯²·3·|p_A·p_B|·Δx_A·Δx_B/(8πε₀·ħ·ln2·L⁵).
    pub fn electric_dipole(t: f64, p_a: f64, p_b: f64, dx_a: f64, dx_b: f64, l: f64) -> f64 {
        t * t * 3.0 * (p_a * p_b).abs() * dx_a * dx_b
            / (8.0 * std::f64::consts::PI * EPS0 * HBAR * LOG2 * l.powi(5))
    }

    /// Γ_mag.Dipole = 3µ₀·|m_A·m_B|·Δx_A·Δx_B/(8πħ·ln2·L⁵) (unscreened).
    pub fn magnetic_dipole(m_a: f64, m_b: f64, dx_a: f64, dx_b: f64, l: f64) -> f64 {
        3.0 * MU0 * (m_a * m_b).abs() * dx_a * dx_b
            / (8.0 * std::f64::consts::PI * HBAR * LOG2 * l.powi(5))
    }
}

/// Screened interaction channels with their transmission power.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScreenedChannel {
    /// Free charges q_A, q_B in C; rate ∝ 𝒯.
    Coulomb { q_a: f64, q_b: f64 },
    /// Particle–particle Casimir; rate ∝ 𝒯².
    Casimir,
    /// Electric dipoles p_A, p_B in C·m; rate ∝ 𝒯².
    ElectricDipole { p_a: f64, p_b: f64 },
}

impl ScreenedChannel {
    fn transmission_power(&self) -> f64 {
        match self {
            ScreenedChannel::Coulomb { .. } => 1.0,
            ScreenedChannel::Casimir | ScreenedChannel::ElectricDipole { .. } => 2.0,
        }
    }

    /// Unscreened rate (𝒯 = 1) of this channel.
    fn unscreened_rate(&self, geom: &Geometry, particle: &Particle, delta_x: f64) -> Result<f64> {
        let l = geom.half_separation;
        Ok(match *self {
            ScreenedChannel::Coulomb { q_a, q_b } => {
                rates::coulomb(1.0, q_a, q_b, delta_x, delta_x, l)
            }
            ScreenedChannel::Casimir => rates::casimir(
                1.0,
                geom.particle_radius,
                particle.material.clausius_mossotti(),
                delta_x,
                delta_x,
                l,
            ),
            ScreenedChannel::ElectricDipole { p_a, p_b } => {
                rates::electric_dipole(1.0, p_a, p_b, delta_x, delta_x, l)
            }
        })
    }
}

/// Smallest conducting-shield thickness such that the screened channel
/// entangles at most 1/`margin` as fast as gravity:
/// 𝒯(d_s)^n · Γ_channel ≤ Γ_Gravity / margin.
///
/// `margin` > 1 leaves the requested headroom of the gravitational rate
/// over the residual electromagnetic channel (2 is the default headroom
/// used for the reference tables).
pub fn shield_thickness_bound(
    channel: ScreenedChannel,
    geom: &Geometry,
    particle: &Particle,
    delta_x: f64,
    conductivity: f64,
    margin: f64,
) -> Result<f64> {
    geom.validate()?;
    if !(margin >= 1.0 && margin.is_finite()) {
        return Err(CoreError::InvalidParameter(format!(
            "margin must be ≥ 1, got {margin}"
        )));
    }
    if !(conductivity > 0.0 && conductivity.is_finite()) {
        return Err(CoreError::InvalidParameter(format!(
            "conductivity must be positive, got {conductivity}"
        )));
    }
    let mass = particle.mass();
    let gamma_g = rates::gravity(mass, mass, delta_x, delta_x, geom.half_separation);
    if gamma_g <= 0.0 {
        return Err(CoreError::InvalidParameter(
            "gravitational rate vanishes; thickness bound undefined".into(),
        ));
    }
    let gamma_channel = channel.unscreened_rate(geom, particle, delta_x)?;
    if gamma_channel <= gamma_g / margin {
        return Ok(0.0); // already slower than gravity without any shield
    }
    // 𝒯^n = Γ_G/(margin·Γ_ch)  ⇒  d_s = (2/(Z₀σ))·(margin·Γ_ch/Γ_G)^{1/n}.
    let n = channel.transmission_power();
    let t_needed = (gamma_g / (margin * gamma_channel)).powf(1.0 / n);
    Ok(2.0 / (Z0 * conductivity * t_needed))
}

/// Channels relevant for the shield *radius* bound, i.e. the requirement
/// that the edge-diffracted interaction stays below gravity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RadiusBoundChannel {
    Coulomb { q_a: f64, q_b: f64 },
    Casimir,
    ElectricDipole { p_a: f64, p_b: f64 },
}

impl RadiusBoundChannel {
    /// Power-law exponent d of the pair potential V ∝ r^{−d}.
    pub fn potential_exponent(&self) -> u32 {
        match self {
            RadiusBoundChannel::Coulomb { .. } => 1,
            RadiusBoundChannel::ElectricDipole { .. } => 3,
            RadiusBoundChannel::Casimir => 7,
        }
    }

    /// κ = |V_Gravity| / |V_channel| evaluated at the direct separation 2L.
    pub fn gravity_potential_ratio(
        &self,
        geom: &Geometry,
        particle: &Particle,
    ) -> Result<f64> {
        geom.validate()?;
        let mass = particle.mass();
        let sep = geom.separation();
        let v_gravity = G * mass * mass / sep;
        let v_channel = match *self {
            RadiusBoundChannel::Coulomb { q_a, q_b } => {
                (q_a * q_b).abs() / (4.0 * std::f64::consts::PI * EPS0 * sep)
            }
            RadiusBoundChannel::ElectricDipole { p_a, p_b } => {
                2.0 * (p_a * p_b).abs() / (4.0 * std::f64::consts::PI * EPS0 * sep.powi(3))
            }
            RadiusBoundChannel::Casimir => {
                let f = particle.material.clausius_mossotti();
                23.0 * HBAR * C * geom.particle_radius.powi(6) * f * f
                    / (4.0 * std::f64::consts::PI * sep.powi(7))
            }
        };
        if v_channel <= 0.0 {
            return Err(CoreError::InvalidParameter(
                "channel potential vanishes; κ undefined".into(),
            ));
        }
        Ok(v_gravity / v_channel)
    }
}

/// Minimum shield radius r_s = L·√(κ^{−2/d} − 1) such that the path around
/// the shield edge is long enough to suppress a V ∝ r^{−d} interaction
/// below gravity (κ = |V_G|/|V_channel| at separation 2L).
pub fn shield_radius_bound(potential_exponent: u32, kappa: f64, l: f64) -> Result<f64> {
    if !(kappa > 0.0 && kappa.is_finite()) {
        return Err(CoreError::InvalidParameter(format!(
            "κ must be positive and finite, got {kappa}"
        )));
    }
    if kappa > 1.0 {
        return Err(CoreError::InvalidParameter(format!(
            "κ = {kappa} > 1: gravity already dominates, no shield radius required"
        )));
    }
    if potential_exponent == 0 {
        return Err(CoreError::InvalidParameter(
            "potential exponent must be ≥ 1".into(),
        ));
    }
    if !(l > 0.0 && l.is_finite()) {
        return Err(CoreError::InvalidParameter(format!(
            "half-separation must be positive, got {l}"
        )));
    }
    Ok(l * (kappa.powf(-2.0 / potential_exponent as f64) - 1.0).sqrt())
}

/// Largest external bias field before magnetically induced dipoles
/// entangle as fast as gravity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FieldBound {
    /// Any field is admissible (no dipole response).
    Unbounded,
    /// Maximum admissible bias field in T.
    Bounded(f64),
}

/// Solve Γ_mag.Dipole(B) = Γ_Gravity for the bias field B. Both induced
/// moments scale linearly with B, so the rate is quadratic in B and the
/// bound is closed-form.
pub fn max_external_field(
    geom: &Geometry,
    particle: &Particle,
    delta_x: f64,
) -> Result<FieldBound> {
    geom.validate()?;
    let chi = particle.material.volume_susceptibility.abs();
    if chi == 0.0 {
        return Ok(FieldBound::Unbounded);
    }
    let mass = particle.mass();
    let l = geom.half_separation;
    let gamma_g = rates::gravity(mass, mass, delta_x, delta_x, l);
    let m_unit = 4.0 * std::f64::consts::PI * geom.particle_radius.powi(3) * chi / (3.0 * MU0);
    let gamma_mag_unit = rates::magnetic_dipole(m_unit, m_unit, delta_x, delta_x, l);
    Ok(FieldBound::Bounded((gamma_g / gamma_mag_unit).sqrt()))
}
