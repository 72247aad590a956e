//! Vibrational eigenmodes of the clamped circular shield membrane.
//!
//! The shield is a thin circular plate (radius r_s, thickness d_s) clamped
//! at its rim. Transverse flexural modes are labelled (k, l) with radial
//! index k ≥ 1 and angular index l ≥ 0; their profiles are
//!
//! ```text
//! u_kl(r, θ) = [ J_l(β_k r) − (J_l(r̃_kl)/I_l(r̃_kl)) I_l(β_k r) ] cos(lθ),
//! β_k = r̃_kl / r_s,
//! ```
//!
//! where the dimensionless frequency parameter r̃_kl is the k-th positive
//! root of the clamped-plate characteristic equation
//!
//! ```text
//! J_l(r̃) I_{l+1}(r̃) + I_l(r̃) J_{l+1}(r̃) = 0,
//! ```
//!
//! and the eigenfrequency follows from thin-plate elasticity,
//!
//! ```text
//! ω_kl = r̃_kl² (d_s/r_s²) √(E / (12 ρ (1 − ν²))).
//! ```
//!
//! Each mode behaves as a harmonic oscillator of effective mass
//! m_eff = ρ d_s ∫ u_kl² dA (the profile normalisation has coefficient 1
//! on J_l). The particles couple to the displacement on the symmetry axis,
//! so only two profile numbers enter the interaction Hamiltonians:
//!
//! * u₀ = u_kl(0) — non-zero only for l = 0 (piston-like motion),
//! * ∂u = ∂_r u_kl(0) along the delocalisation direction — non-zero only
//!   for l = 1 (rocking motion).
//!
//! All higher l vanish at the origin to the orders kept here, which is why
//! a single (k, l) pair often dominates the shield-induced decoherence.

use crate::bessel::{bessel_i_all, bessel_j_all};
use crate::constants::{HBAR, KB};
use crate::error::{CoreError, Result};
use crate::materials::Material;
use crate::quadrature::GaussLegendre;

/// Shield membrane: material plus plate geometry.
#[derive(Debug, Clone)]
pub struct Shield {
    pub material: Material,
    /// Plate thickness d_s in m.
    pub thickness: f64,
    /// Plate radius r_s in m.
    pub radius: f64,
}

/// One flexural eigenmode of the clamped plate.
#[derive(Debug, Clone)]
pub struct ShieldMode {
    /// Radial index k ≥ 1.
    pub k: usize,
    /// Angular index l ≥ 0.
    pub l: usize,
    /// Dimensionless root r̃_kl of the characteristic equation.
    pub root: f64,
    /// Angular eigenfrequency ω_kl in rad/s.
    pub omega: f64,
    /// m_eff / m_plate.
    pub mass_fraction: f64,
    /// Effective mass m_eff in kg.
    pub effective_mass: f64,
    /// Centre displacement u₀ (dimensionless; 0 unless l = 0).
    pub u0: f64,
    /// Centre slope ∂_r u in 1/m (0 unless l = 1).
    pub du: f64,
}

/// Thermal occupation data of one mode.
#[derive(Debug, Clone, Copy)]
pub struct ThermalState {
    /// Bose occupation n̄ = 1/(e^{ħω/k_BT} − 1).
    pub nbar: f64,
    /// Zero-point length √(ħ/2m_eff ω) in m.
    pub x_zpf: f64,
    /// RMS displacement Δq = x_zpf·√(2n̄+1) in m.
    pub delta_q: f64,
}

/// Value of the (bounded) characteristic function
/// J_l(x) + (I_l(x)/I_{l+1}(x))·J_{l+1}(x), whose zeros are the r̃_kl.
fn characteristic(l: usize, x: f64) -> Result<f64> {
    let j = bessel_j_all(l + 1, x)?;
    let i = bessel_i_all(l + 1, x)?;
    Ok(j[l] + (i[l] / i[l + 1]) * j[l + 1])
}

/// First `count` positive roots r̃_kl for angular index `l`.
pub fn characteristic_roots(l: usize, count: usize) -> Result<Vec<f64>> {
    let mut roots = Vec::with_capacity(count);
    let step = 0.05;
    let mut x = step;
    let mut prev = characteristic(l, x)?;
    let mut guard = 0usize;
    while roots.len() < count {
        let x_next = x + step;
        let cur = characteristic(l, x_next)?;
        if prev == 0.0 {
            roots.push(x);
        } else if prev.signum() != cur.signum() {
            // Bisection to ~1e-14 relative.
            let (mut a, mut b) = (x, x_next);
            let mut fa = prev;
            for _ in 0..80 {
                let m = 0.5 * (a + b);
                let fm = characteristic(l, m)?;
                if fa.signum() == fm.signum() {
                    a = m;
                    fa = fm;
                } else {
                    b = m;
                }
                if (b - a) < 1e-15 * b {
                    break;
                }
            }
            roots.push(0.5 * (a + b));
        }
        prev = cur;
        x = x_next;
        guard += 1;
        if guard > 100_000 {
            return Err(CoreError::Numeric(format!(
                "failed to bracket {count} clamped-plate roots for l = {l}"
            )));
        }
    }
    Ok(roots)
}

/// Radial mode profile g(r) = J_l(βr) − (J_l(r̃)/I_l(r̃))·I_l(βr)
/// evaluated at fractional radius s = r/r_s ∈ [0, 1].
pub fn radial_profile(l: usize, root: f64, s: f64) -> Result<f64> {
    let x = root * s;
    let j = bessel_j_all(l, x)?;
    let i = bessel_i_all(l, x)?;
    let jr = bessel_j_all(l, root)?;
    let ir = bessel_i_all(l, root)?;
    Ok(j[l] - (jr[l] / ir[l]) * i[l])
}

impl Shield {
    pub fn new(material: Material, thickness: f64, radius: f64) -> Result<Self> {
        material.validate()?;
        material.plate_speed()?; // requires elastic data
        if !(thickness.is_finite() && thickness > 0.0) {
            return Err(CoreError::InvalidParameter(format!(
                "shield thickness must be positive, got {thickness}"
            )));
        }
        if !(radius.is_finite() && radius > 0.0) {
            return Err(CoreError::InvalidParameter(format!(
                "shield radius must be positive, got {radius}"
            )));
        }
        Ok(Self {
            material,
            thickness,
            radius,
        })
    }

    /// Total plate mass m = ρ π r_s² d_s.
    pub fn plate_mass(&self) -> f64 {
        self.material.density * std::f64::consts::PI * self.radius * self.radius * self.thickness
    }

    /// Build mode (k, l); k is 1-based.
    pub fn mode(&self, k: usize, l: usize) -> Result<ShieldMode> {
        if k == 0 {
            return Err(CoreError::InvalidParameter(
                "radial mode index k is 1-based; got k = 0".into(),
            ));
        }
        let root = characteristic_roots(l, k)?[k - 1];
        let speed = self.material.plate_speed()?;
        let omega = root * root * (self.thickness / (self.radius * self.radius)) * speed;

        // m_eff/m = (∫cos²(lθ)dθ / π) · ∫₀¹ g(s)² s ds,
        // with the angular integral 2π for l = 0 and π for l ≥ 1.
        let rule = GaussLegendre::new(96)?;
        let mut radial = 0.0;
        for (&x, &w) in rule.nodes.iter().zip(&rule.weights) {
            let s = 0.5 * (x + 1.0);
            let g = radial_profile(l, root, s)?;
            radial += 0.5 * w * g * g * s;
        }
        let angular_over_pi = if l == 0 { 2.0 } else { 1.0 };
        let mass_fraction = angular_over_pi * radial;

        let jr = bessel_j_all(l + 1, root)?;
        let ir = bessel_i_all(l + 1, root)?;
        let u0 = if l == 0 { 1.0 - jr[0] / ir[0] } else { 0.0 };
        let du = if l == 1 {
            (root / self.radius) / 2.0 * (1.0 - jr[1] / ir[1])
        } else {
            0.0
        };

        Ok(ShieldMode {
            k,
            l,
            root,
            omega,
            mass_fraction,
            effective_mass: mass_fraction * self.plate_mass(),
            u0,
            du,
        })
    }

    /// All modes with k ≤ kmax, l ≤ lmax, sorted by ascending frequency.
    pub fn modes_up_to(&self, kmax: usize, lmax: usize) -> Result<Vec<ShieldMode>> {
        let mut modes = Vec::with_capacity(kmax * (lmax + 1));
        for l in 0..=lmax {
            for k in 1..=kmax {
                modes.push(self.mode(k, l)?);
            }
        }
        modes.sort_by(|a, b| a.omega.total_cmp(&b.omega));
        Ok(modes)
    }
}

impl ShieldMode {
    /// Thermal statistics at temperature `temp` (K).
    pub fn thermal(&self, temp: f64) -> Result<ThermalState> {
        if !(temp.is_finite() && temp >= 0.0) {
            return Err(CoreError::InvalidParameter(format!(
                "shield temperature must be non-negative, got {temp}"
            )));
        }
        let nbar = if temp == 0.0 {
            0.0
        } else {
            let x = HBAR * self.omega / (KB * temp);
            1.0 / x.exp_m1()
        };
        let x_zpf = (HBAR / (2.0 * self.effective_mass * self.omega)).sqrt();
        Ok(ThermalState {
            nbar,
            x_zpf,
            delta_q: x_zpf * (2.0 * nbar + 1.0).sqrt(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn niobium_2um() -> Shield {
        Shield::new(Material::niobium(), 2e-6, 1e-2).unwrap()
    }

    fn copper_500nm() -> Shield {
        Shield::new(Material::copper(), 500e-9, 1e-2).unwrap()
    }

    #[test]
    fn characteristic_roots_match_reference_values() {
        let l0 = characteristic_roots(0, 4).unwrap();
        let expect0 = [
            3.196220616582541,
            6.306437047688424,
            9.439499137876405,
            12.577130640430662,
        ];
        let l1 = characteristic_roots(1, 4).unwrap();
        let expect1 = [
            4.610899879049063,
            7.799273800811294,
            10.958067191919497,
            14.108627805411002,
        ];
        let l2 = characteristic_roots(2, 4).unwrap();
        let expect2 = [
            5.90567823542053,
            9.1968825996354,
            12.402220966864384,
            15.579491490430268,
        ];
        for i in 0..4 {
            assert_relative_eq!(l0[i], expect0[i], max_relative = 1e-12);
            assert_relative_eq!(l1[i], expect1[i], max_relative = 1e-12);
            assert_relative_eq!(l2[i], expect2[i], max_relative = 1e-12);
        }
        // Residual of the bounded characteristic function at each root.
        for (l, roots) in [(0, &l0), (1, &l1), (2, &l2)] {
            for &r in roots.iter() {
                assert!(characteristic(l, r).unwrap().abs() < 1e-10);
            }
        }
    }

    #[test]
    fn profile_vanishes_at_the_clamped_rim() {
        for (l, k) in [(0usize, 1usize), (0, 2), (1, 1), (2, 1)] {
            let root = characteristic_roots(l, k).unwrap()[k - 1];
            let edge = radial_profile(l, root, 1.0).unwrap();
            assert!(
                edge.abs() < 1e-10,
                "u(r_s) = {edge} for mode ({k},{l})"
            );
        }
    }

    #[test]
    fn eigenfrequencies_match_reference_values() {
        let w10_cu = copper_500nm().mode(1, 0).unwrap().omega;
        assert_relative_eq!(w10_cu, 54.79885413285012, max_relative = 1e-12);
        let nb = niobium_2um();
        assert_relative_eq!(
            nb.mode(1, 0).unwrap().omega,
            225.09902871665903,
            max_relative = 1e-12
        );
        assert_relative_eq!(
            nb.mode(1, 1).unwrap().omega,
            468.4589149721503,
            max_relative = 1e-12
        );
    }

    #[test]
    fn effective_masses_match_reference_values() {
        let nb = niobium_2um();
        let m10 = nb.mode(1, 0).unwrap();
        let m11 = nb.mode(1, 1).unwrap();
        assert_relative_eq!(m10.mass_fraction, 0.20377419563858198, max_relative = 1e-10);
        assert_relative_eq!(m11.mass_fraction, 0.06716138271683351, max_relative = 1e-10);
        assert_relative_eq!(nb.plate_mass(), 5.392229630621521e-6, max_relative = 1e-12);
        assert_relative_eq!(
            m10.effective_mass,
            1.0987972556784286e-6,
            max_relative = 1e-10
        );
        assert_relative_eq!(
            m11.effective_mass,
            3.621495979192218e-7,
            max_relative = 1e-10
        );
        let cu = copper_500nm();
        assert_relative_eq!(cu.plate_mass(), 1.4074335088082273e-6, max_relative = 1e-10);
        assert_relative_eq!(
            cu.mode(1, 0).unwrap().effective_mass,
            2.867986311721836e-7,
            max_relative = 1e-10
        );
    }

    #[test]
    fn centre_amplitude_and_slope_follow_the_selection_rules() {
        let nb = niobium_2um();
        let m10 = nb.mode(1, 0).unwrap();
        assert_relative_eq!(m10.u0, 1.0557127525588645, max_relative = 1e-12);
        assert_eq!(m10.du, 0.0);

        let m11 = nb.mode(1, 1).unwrap();
        assert_eq!(m11.u0, 0.0);
        assert_relative_eq!(m11.du, 234.05300434349206, max_relative = 1e-11);

        // l ≥ 2 couples neither through u₀ nor ∂u.
        let m12 = nb.mode(1, 2).unwrap();
        assert_eq!(m12.u0, 0.0);
        assert_eq!(m12.du, 0.0);

        // Numerical derivative of the profile confirms the closed form.
        let h = 1e-6;
        let fd = (radial_profile(1, m11.root, h).unwrap()
            - radial_profile(1, m11.root, 0.0).unwrap())
            / (h * nb.radius);
        assert_relative_eq!(m11.du, fd, max_relative = 1e-5);
    }

    #[test]
    fn thermal_amplitudes_match_reference_values() {
        // Residual centre motion u₀·Δq of the fundamental at 10 nK.
        let nb_amp = {
            let m = niobium_2um().mode(1, 0).unwrap();
            m.u0 * m.thermal(1e-8).unwrap().delta_q
        };
        assert_relative_eq!(nb_amp, 1.6645200299074554e-15, max_relative = 1e-10);

        let cu_amp = {
            let m = copper_500nm().mode(1, 0).unwrap();
            m.u0 * m.thermal(1e-8).unwrap().delta_q
        };
        assert_relative_eq!(cu_amp, 1.3367773995622599e-14, max_relative = 1e-10);

        // T = 0 reduces to pure zero-point motion.
        let m = niobium_2um().mode(1, 0).unwrap();
        let t0 = m.thermal(0.0).unwrap();
        assert_eq!(t0.nbar, 0.0);
        assert_relative_eq!(t0.delta_q, t0.x_zpf, max_relative = 1e-15);
        assert!(m.thermal(-1.0).is_err());
    }

    #[test]
    fn mode_listing_is_sorted_by_frequency() {
        let modes = niobium_2um().modes_up_to(2, 2).unwrap();
        assert_eq!(modes.len(), 6);
        for pair in modes.windows(2) {
            assert!(pair[0].omega <= pair[1].omega);
        }
        // (1,0) < (1,1) < (1,2) < (2,0) ordering of the lowest roots.
        assert_eq!((modes[0].k, modes[0].l), (1, 0));
        assert_eq!((modes[1].k, modes[1].l), (1, 1));
        assert_eq!((modes[2].k, modes[2].l), (1, 2));
        assert_eq!((modes[3].k, modes[3].l), (2, 0));
    }

    #[test]
    fn non_elastic_materials_cannot_form_a_shield() {
        assert!(Shield::new(Material::silica(), 1e-6, 1e-2).is_err());
        assert!(Shield::new(Material::niobium(), 0.0, 1e-2).is_err());
    }
}
