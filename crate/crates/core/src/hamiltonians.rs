//! Quadratic Hamiltonians for gravity, Casimir, magnetic-dipole, trap and
//! shield-mode couplings.
//!
//! Every interaction descends from an exact pair potential,
//!
//! ```text
//! V_grav = −G M_A M_B / d̂_AB,      V_cas = −η d₀⁴ / d̂²,
//! V_mag  = −δ d₀,mag⁵ / d̂³,
//! ```
//!
//! evaluated on exact distance operators and expanded to second order in
//! the mode coordinates with the jet machinery of [`crate::jet`] — no
//! hand-copied series. Each particle's delocalisation axis x̂ is tilted by
//! θ from the transverse direction, so its lab coordinates are
//!
//! ```text
//! x̂′_{A/B} = ±L + x̂ sinθ − ŷ cosθ,      ŷ′ = x̂ cosθ + ŷ sinθ,
//! ```
//!
//! (A at +L, B at −L; θ = π/2 is the *linear* head-to-tail configuration,
//! θ = 0 the *parallel* one). The gap of particle i to the shield surface,
//! including static noise and membrane motion, is
//!
//! ```text
//! d̂_A = d₀ + ξ_A + x̂ sinΘ_A − ŷ cosΘ_A − Σ_m q̂_m [u_m(0) + ∂u_m·(x̂ cosΘ_A + ŷ sinΘ_A)],
//! d̂_B = d₀ + ξ_B − x̂ sinΘ_B + ŷ cosΘ_B + Σ_m q̂_m [u_m(0) + ∂u_m·(x̂ cosΘ_B + ŷ sinΘ_B)],
//! ```
//!
//! with Θ_i = θ_i + ξ_i^{(θ)} the tilt-noise-shifted angle, ξ_i^{(L)} the
//! static gap noise, and q̂_m the displacement of membrane mode m with
//! centre amplitude u_m(0) and centre slope ∂u_m. Noise enters the
//! coefficients *exactly* (no truncation in ξ); ensemble averaging is the
//! engines' job. A correlated shield fluctuation moves both gaps in
//! opposite directions (ξ_A = −ξ_B), a detector fluctuation draws all four
//! noise values independently.
//!
//! Forms are stored over the full quadrature vector r = (x₁, p₁, x₂, p₂, …)
//! in SI units, H = ½ rᵀG r + gᵀr + c; interaction builders fill the
//! position–position block, while [`trap_form`] and
//! [`shield_oscillator_form`] add the kinetic and restoring terms.

use crate::error::{CoreError, Result};
use crate::jet::Jet2;
use crate::shield::ShieldMode;
use ndarray::{Array1, Array2};
use std::collections::BTreeSet;
use std::fmt;

/// The two levitated particles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ParticleLabel {
    A,
    B,
}

impl ParticleLabel {
    /// Sign of this particle's motion in its gap distance (+1 for A, −1
    /// for B) — the two particles face the shield from opposite sides.
    pub fn gap_sign(self) -> f64 {
        match self {
            ParticleLabel::A => 1.0,
            ParticleLabel::B => -1.0,
        }
    }

    pub fn x(self) -> ModeLabel {
        match self {
            ParticleLabel::A => ModeLabel::XA,
            ParticleLabel::B => ModeLabel::XB,
        }
    }

    pub fn y(self) -> ModeLabel {
        match self {
            ParticleLabel::A => ModeLabel::YA,
            ParticleLabel::B => ModeLabel::YB,
        }
    }
}

/// One mechanical degree of freedom (two quadratures).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ModeLabel {
    /// Delocalisation-axis coordinate of particle A.
    XA,
    /// Transverse coordinate of particle A.
    YA,
    /// Delocalisation-axis coordinate of particle B.
    XB,
    /// Transverse coordinate of particle B.
    YB,
    /// Shield membrane mode (k, l).
    Shield { k: usize, l: usize },
}

impl fmt::Display for ModeLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModeLabel::XA => write!(f, "xA"),
            ModeLabel::YA => write!(f, "yA"),
            ModeLabel::XB => write!(f, "xB"),
            ModeLabel::YB => write!(f, "yB"),
            ModeLabel::Shield { k, l } => write!(f, "shield({k},{l})"),
        }
    }
}

/// One static-noise realisation.
///
/// `shift_*` are gap-length offsets in m (positive = wider gap), `tilt_*`
/// are delocalisation-axis tilt offsets in rad, `force_*` are trap-centre
/// force offsets in N along the delocalisation axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseDraw {
    pub shift_a: f64,
    pub shift_b: f64,
    pub tilt_a: f64,
    pub tilt_b: f64,
    pub force_a: f64,
    pub force_b: f64,
}

impl NoiseDraw {
    pub fn zero() -> Self {
        Self {
            shift_a: 0.0,
            shift_b: 0.0,
            tilt_a: 0.0,
            tilt_b: 0.0,
            force_a: 0.0,
            force_b: 0.0,
        }
    }

    /// Correlated shield fluctuation: one displacement draw moves both
    /// gaps in opposite directions (ξ_A^{(L)} = −ξ_B^{(L)} ≡ ξ^{(L)}),
    /// one tilt draw rotates both axes together (ξ_A^{(θ)} = ξ_B^{(θ)}).
    pub fn shield_correlated(xi_l: f64, xi_theta: f64) -> Self {
        Self {
            shift_a: xi_l,
            shift_b: -xi_l,
            tilt_a: xi_theta,
            tilt_b: xi_theta,
            force_a: 0.0,
            force_b: 0.0,
        }
    }

    /// Uncorrelated per-detector fluctuations: four independent draws.
    pub fn detector_uncorrelated(
        xi_l_a: f64,
        xi_l_b: f64,
        xi_theta_a: f64,
        xi_theta_b: f64,
    ) -> Self {
        Self {
            shift_a: xi_l_a,
            shift_b: xi_l_b,
            tilt_a: xi_theta_a,
            tilt_b: xi_theta_b,
            force_a: 0.0,
            force_b: 0.0,
        }
    }

    pub fn with_forces(mut self, force_a: f64, force_b: f64) -> Self {
        self.force_a = force_a;
        self.force_b = force_b;
        self
    }

    pub fn shift(&self, p: ParticleLabel) -> f64 {
        match p {
            ParticleLabel::A => self.shift_a,
            ParticleLabel::B => self.shift_b,
        }
    }

    pub fn tilt(&self, p: ParticleLabel) -> f64 {
        match p {
            ParticleLabel::A => self.tilt_a,
            ParticleLabel::B => self.tilt_b,
        }
    }

    pub fn force(&self, p: ParticleLabel) -> f64 {
        match p {
            ParticleLabel::A => self.force_a,
            ParticleLabel::B => self.force_b,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for v in [
            self.shift_a,
            self.shift_b,
            self.tilt_a,
            self.tilt_b,
            self.force_a,
            self.force_b,
        ] {
            if !v.is_finite() {
                return Err(CoreError::InvalidParameter(
                    "noise draw contains a non-finite value".into(),
                ));
            }
        }
        Ok(())
    }
}

/// Quadratic Hamiltonian H = ½ rᵀG r + gᵀr + c over the interleaved
/// quadrature vector r = (x₁, p₁, x₂, p₂, …) in SI units.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticForm {
    pub modes: Vec<ModeLabel>,
    /// 2n×2n symmetric coefficient matrix.
    pub g_matrix: Array2<f64>,
    /// 2n linear coefficient vector.
    pub linear: Array1<f64>,
    /// Scalar offset in J.
    pub offset: f64,
    /// Linearisation-validity warnings raised during construction.
    pub warnings: Vec<String>,
}

impl QuadraticForm {
    pub fn zeros(modes: Vec<ModeLabel>) -> Result<Self> {
        let unique: BTreeSet<_> = modes.iter().collect();
        if unique.len() != modes.len() {
            return Err(CoreError::Composition(format!(
                "duplicate mode labels in {modes:?}"
            )));
        }
        let dim = 2 * modes.len();
        Ok(Self {
            modes,
            g_matrix: Array2::zeros((dim, dim)),
            linear: Array1::zeros(dim),
            offset: 0.0,
            warnings: Vec::new(),
        })
    }

    pub fn n_modes(&self) -> usize {
        self.modes.len()
    }

    /// Quadrature dimension 2n.
    pub fn dim(&self) -> usize {
        2 * self.modes.len()
    }

    pub fn index_of(&self, label: ModeLabel) -> Option<usize> {
        self.modes.iter().position(|m| *m == label)
    }

    /// Row of the position quadrature of `label`.
    pub fn pos_index(&self, label: ModeLabel) -> Result<usize> {
        self.index_of(label)
            .map(|i| 2 * i)
            .ok_or_else(|| CoreError::Composition(format!("mode {label} not present")))
    }

    /// Row of the momentum quadrature of `label`.
    pub fn mom_index(&self, label: ModeLabel) -> Result<usize> {
        Ok(self.pos_index(label)? + 1)
    }

    /// Re-express this form over `target` modes (a superset).
    pub fn embed(&self, target: &[ModeLabel]) -> Result<Self> {
        let mut out = Self::zeros(target.to_vec())?;
        let map: Vec<usize> = self
            .modes
            .iter()
            .map(|m| {
                target.iter().position(|t| t == m).ok_or_else(|| {
                    CoreError::Composition(format!("mode {m} missing from target mode list"))
                })
            })
            .collect::<Result<_>>()?;
        for (i, &ti) in map.iter().enumerate() {
            for q in 0..2 {
                out.linear[2 * ti + q] = self.linear[2 * i + q];
                for (j, &tj) in map.iter().enumerate() {
                    for s in 0..2 {
                        out.g_matrix[(2 * ti + q, 2 * tj + s)] =
                            self.g_matrix[(2 * i + q, 2 * j + s)];
                    }
                }
            }
        }
        out.offset = self.offset;
        out.warnings = self.warnings.clone();
        Ok(out)
    }

    /// Drop modes, keeping only `keep`. Fails if any kept mode couples to
    /// a dropped one (relative to the largest coefficient), since dropping
    /// coupled modes would change the dynamics silently.
    pub fn restrict(&self, keep: &[ModeLabel]) -> Result<Self> {
        let keep_idx: Vec<usize> = keep
            .iter()
            .map(|m| {
                self.index_of(*m).ok_or_else(|| {
                    CoreError::Composition(format!("mode {m} not present in form"))
                })
            })
            .collect::<Result<_>>()?;
        let dropped: Vec<usize> = (0..self.n_modes())
            .filter(|i| !keep_idx.contains(i))
            .collect();
        let scale = self
            .g_matrix
            .iter()
            .fold(0.0f64, |acc, v| acc.max(v.abs()));
        for &i in &keep_idx {
            for &j in &dropped {
                for q in 0..2 {
                    for s in 0..2 {
                        let v = self.g_matrix[(2 * i + q, 2 * j + s)].abs();
                        if v > 1e-12 * scale {
                            return Err(CoreError::Composition(format!(
                                "cannot drop mode {}: coupled to kept mode {} \
                                 with coefficient {v:.3e}",
                                self.modes[j], self.modes[i]
                            )));
                        }
                    }
                }
            }
        }
        let mut out = Self::zeros(keep.to_vec())?;
        for (a, &i) in keep_idx.iter().enumerate() {
            for q in 0..2 {
                out.linear[2 * a + q] = self.linear[2 * i + q];
                for (b, &j) in keep_idx.iter().enumerate() {
                    for s in 0..2 {
                        out.g_matrix[(2 * a + q, 2 * b + s)] =
                            self.g_matrix[(2 * i + q, 2 * j + s)];
                    }
                }
            }
        }
        out.offset = self.offset;
        out.warnings = self.warnings.clone();
        Ok(out)
    }

    /// Largest symmetry defect of G (should be 0 by construction).
    pub fn asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.dim() {
            for j in 0..self.dim() {
                worst = worst.max((self.g_matrix[(i, j)] - self.g_matrix[(j, i)]).abs());
            }
        }
        worst
    }
}

/// Mode-aligned sum of forms over the union of their mode lists
/// (canonically ordered) — commutes with permutation of the inputs.
pub fn assemble(forms: &[QuadraticForm]) -> Result<QuadraticForm> {
    let mut union: BTreeSet<ModeLabel> = BTreeSet::new();
    for f in forms {
        let unique: BTreeSet<_> = f.modes.iter().collect();
        if unique.len() != f.modes.len() {
            return Err(CoreError::Composition(format!(
                "duplicate mode labels in {:?}",
                f.modes
            )));
        }
        union.extend(f.modes.iter().copied());
    }
    let target: Vec<ModeLabel> = union.into_iter().collect();
    let mut out = QuadraticForm::zeros(target.clone())?;
    for f in forms {
        let e = f.embed(&target)?;
        out.g_matrix = &out.g_matrix + &e.g_matrix;
        out.linear = &out.linear + &e.linear;
        out.offset += e.offset;
        out.warnings.extend(e.warnings);
    }
    Ok(out)
}

/// Interaction channels mediated by the shield gaps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GapInteraction {
    /// V = −η d₀⁴ / d̂².
    Casimir,
    /// V = −δ d₀,mag⁵ / d̂³.
    MagneticDipole,
}

impl GapInteraction {
    /// Power n of the gap law V = −C d₀^{n+2}/d̂ⁿ.
    pub fn exponent(self) -> i32 {
        match self {
            GapInteraction::Casimir => 2,
            GapInteraction::MagneticDipole => 3,
        }
    }
}

/// Shield-mode data needed by the coupling builders.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeCoupling {
    pub label: ModeLabel,
    /// Centre amplitude u(0) (dimensionless).
    pub u0: f64,
    /// Centre slope ∂_r u(0) in 1/m, projected on the transverse axis.
    pub du: f64,
}

impl From<&ShieldMode> for ModeCoupling {
    fn from(m: &ShieldMode) -> Self {
        Self {
            label: ModeLabel::Shield { k: m.k, l: m.l },
            u0: m.u0,
            du: m.du,
        }
    }
}

/// Exact gap distance d̂ of particle `p` as a jet in (x̂, ŷ, q̂₁, …).
///
/// The caller supplies the coordinates as jets, which makes the same
/// construction usable with any subset of them treated as constants.
pub fn gap_distance(
    p: ParticleLabel,
    theta: f64,
    d0: f64,
    draw: &NoiseDraw,
    x: &Jet2,
    y: &Jet2,
    shield: &[(ModeCoupling, Jet2)],
) -> Jet2 {
    let s = p.gap_sign();
    let angle = theta + draw.tilt(p);
    let (sin_t, cos_t) = angle.sin_cos();
    let n = x.nvars();
    // d̂ = d0 + ξ + s(x sinΘ − y cosΘ) − s Σ q [u0 + ∂u (x cosΘ + y sinΘ)]
    let mut d = &(&x.scale(s * sin_t) - &y.scale(s * cos_t)) + (d0 + draw.shift(p));
    if !shield.is_empty() {
        let transverse = &x.scale(cos_t) + &y.scale(sin_t);
        for (mode, q) in shield {
            let profile = &(&transverse.scale(mode.du) + mode.u0) * q;
            d = &d - &profile.scale(s);
        }
    }
    debug_assert_eq!(d.nvars(), n);
    d
}

/// Interaction energy −C/d̂ⁿ for a gap-mediated channel.
fn gap_energy(kind: GapInteraction, coupling: f64, d0: f64, gap: &Jet2) -> Jet2 {
    let n = kind.exponent();
    gap.powi(-n).scale(-coupling * d0.powi(n + 2))
}

/// Lift a position-space jet (value, gradient, Hessian over mode
/// positions) into a full quadrature-space [`QuadraticForm`].
fn form_from_jet(modes: Vec<ModeLabel>, jet: &Jet2, warnings: Vec<String>) -> Result<QuadraticForm> {
    let n = modes.len();
    assert_eq!(jet.nvars(), n, "jet arity must match mode count");
    let mut form = QuadraticForm::zeros(modes)?;
    for i in 0..n {
        form.linear[2 * i] = jet.grad[i];
        for j in 0..n {
            form.g_matrix[(2 * i, 2 * j)] = jet.hess[(i, j)];
        }
    }
    form.offset = jet.value;
    form.warnings = warnings;
    Ok(form)
}

fn linearisation_warnings(p: ParticleLabel, d0: f64, draw: &NoiseDraw) -> Vec<String> {
    let mut w = Vec::new();
    if draw.shift(p).abs() > 0.1 * d0 {
        w.push(format!(
            "gap noise |ξ| = {:.3e} m exceeds d0/10 = {:.3e} m; quadratic \
             expansion may be inaccurate",
            draw.shift(p).abs(),
            0.1 * d0
        ));
    }
    if draw.tilt(p).abs() > 0.1 {
        w.push(format!(
            "tilt noise |ξ^θ| = {:.3e} rad exceeds 0.1 rad; quadratic \
             expansion may be inaccurate",
            draw.tilt(p).abs()
        ));
    }
    w
}

/// Gap-mediated interaction of one particle, expanded to second order in
/// (x̂, ŷ) and all supplied shield-mode displacements, exactly in the
/// noise draw.
pub fn gap_interaction_form(
    p: ParticleLabel,
    kind: GapInteraction,
    theta: f64,
    coupling: f64,
    d0: f64,
    draw: &NoiseDraw,
    shield: &[ModeCoupling],
) -> Result<QuadraticForm> {
    draw.validate()?;
    if !(d0 > 0.0 && d0.is_finite()) {
        return Err(CoreError::Geometry(format!(
            "gap distance must be positive, got {d0}"
        )));
    }
    if !(coupling >= 0.0 && coupling.is_finite()) {
        return Err(CoreError::InvalidParameter(format!(
            "coupling strength must be non-negative, got {coupling}"
        )));
    }
    let n = 2 + shield.len();
    let x = Jet2::variable(0, 0.0, n);
    let y = Jet2::variable(1, 0.0, n);
    let shield_jets: Vec<(ModeCoupling, Jet2)> = shield
        .iter()
        .enumerate()
        .map(|(m, c)| (*c, Jet2::variable(2 + m, 0.0, n)))
        .collect();
    let gap = gap_distance(p, theta, d0, draw, &x, &y, &shield_jets);
    if gap.value <= 0.0 {
        return Err(CoreError::Geometry(format!(
            "noise draw closes the gap: d̂ = {:.3e} m",
            gap.value
        )));
    }
    let energy = gap_energy(kind, coupling, d0, &gap);
    let mut modes = vec![p.x(), p.y()];
    modes.extend(shield.iter().map(|c| c.label));
    form_from_jet(modes, &energy, linearisation_warnings(p, d0, draw))
}

/// Casimir interaction of particle `p` with the shield surface
/// (V = −η d₀⁴/d̂²), without membrane dynamics.
pub fn casimir_form(
    p: ParticleLabel,
    theta: f64,
    eta: f64,
    d0: f64,
    draw: &NoiseDraw,
) -> Result<QuadraticForm> {
    gap_interaction_form(p, GapInteraction::Casimir, theta, eta, d0, draw, &[])
}

/// Magnetic-dipole interaction of particle `p` with its image behind the
/// superconducting shield (V = −δ d₀,mag⁵/d̂³), without membrane dynamics.
pub fn magdipole_form(
    p: ParticleLabel,
    theta: f64,
    delta: f64,
    d0_mag: f64,
    draw: &NoiseDraw,
) -> Result<QuadraticForm> {
    gap_interaction_form(p, GapInteraction::MagneticDipole, theta, delta, d0_mag, draw, &[])
}

/// Gap interaction including one vibrating membrane mode. Contains the
/// static terms of [`casimir_form`]/[`magdipole_form`] plus the q̂-linear
/// force, the q̂² curvature and the particle–membrane bilinears
/// (u(0)-mediated for l = 0 modes, ∂u-mediated for l = 1 modes).
pub fn shield_coupling_form(
    p: ParticleLabel,
    kind: GapInteraction,
    theta: f64,
    coupling: f64,
    d0: f64,
    mode: &ShieldMode,
) -> Result<QuadraticForm> {
    gap_interaction_form(
        p,
        kind,
        theta,
        coupling,
        d0,
        &NoiseDraw::zero(),
        &[ModeCoupling::from(mode)],
    )
}

/// Exact two-particle distance d̂_AB as a jet in (x̂_A, ŷ_A, x̂_B, ŷ_B).
///
/// `separation_noise` adds to the centre-to-centre distance 2L (it is zero
/// for correlated shield noise, which moves the shield but not the traps).
#[allow(clippy::too_many_arguments)]
pub fn pair_distance(
    theta_a: f64,
    theta_b: f64,
    half_separation: f64,
    separation_noise: f64,
    xa: &Jet2,
    ya: &Jet2,
    xb: &Jet2,
    yb: &Jet2,
) -> Jet2 {
    let (sa, ca) = theta_a.sin_cos();
    let (sb, cb) = theta_b.sin_cos();
    // Along the lab axis: u = (x̂_A sinθ_A − ŷ_A cosθ_A) − (x̂_B sinθ_B − ŷ_B cosθ_B).
    let u = &(&xa.scale(sa) - &ya.scale(ca)) - &(&xb.scale(sb) - &yb.scale(cb));
    // Transverse: v = (x̂_A cosθ_A + ŷ_A sinθ_A) − (x̂_B cosθ_B + ŷ_B sinθ_B).
    let v = &(&xa.scale(ca) + &ya.scale(sa)) - &(&xb.scale(cb) + &yb.scale(sb));
    let axial = &u + (2.0 * half_separation + separation_noise);
    (&(&axial * &axial) + &(&v * &v)).sqrt()
}

/// Gravitational interaction V = −G M_A M_B/d̂_AB expanded to second order
/// about the trap minima, parameterised by λ = G M_A M_B/4L³.
pub fn gravity_form(
    theta_a: f64,
    theta_b: f64,
    lambda: f64,
    half_separation: f64,
) -> Result<QuadraticForm> {
    gravity_form_with_noise(theta_a, theta_b, lambda, half_separation, &NoiseDraw::zero())
}

/// Diagnostic variant of [`gravity_form`] that lets static gap noise move
/// the trap separation (2L → 2L + ξ_A + ξ_B). Correlated shield noise
/// (ξ_A = −ξ_B) cancels exactly — shield motion never moves the traps —
/// while detector noise perturbs λ at relative order ξ/L. Excluded from
/// production scenarios, where noise couples through the far stronger
/// Casimir/magnetic channels.
pub fn gravity_form_with_noise(
    theta_a: f64,
    theta_b: f64,
    lambda: f64,
    half_separation: f64,
    draw: &NoiseDraw,
) -> Result<QuadraticForm> {
    draw.validate()?;
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(CoreError::InvalidParameter(format!(
            "gravitational coupling must be non-negative, got {lambda}"
        )));
    }
    if !(half_separation > 0.0 && half_separation.is_finite()) {
        return Err(CoreError::Geometry(format!(
            "half-separation must be positive, got {half_separation}"
        )));
    }
    let l = half_separation;
    let n = 4;
    let xa = Jet2::variable(0, 0.0, n);
    let ya = Jet2::variable(1, 0.0, n);
    let xb = Jet2::variable(2, 0.0, n);
    let yb = Jet2::variable(3, 0.0, n);
    let sep_noise = draw.shift_a + draw.shift_b;
    let d = pair_distance(
        theta_a + draw.tilt_a,
        theta_b + draw.tilt_b,
        l,
        sep_noise,
        &xa,
        &ya,
        &xb,
        &yb,
    );
    // G M_A M_B = λ·4L³.
    let energy = d.recip().scale(-lambda * 4.0 * l * l * l);
    form_from_jet(
        vec![ModeLabel::XA, ModeLabel::YA, ModeLabel::XB, ModeLabel::YB],
        &energy,
        Vec::new(),
    )
}

/// Harmonic trap of particle `p`: kinetic terms plus ½Mω²(x̂² + ŷ²) and
/// the force-noise drive ξ·x̂ along the delocalisation axis.
pub fn trap_form(
    p: ParticleLabel,
    omega: f64,
    mass: f64,
    draw: &NoiseDraw,
) -> Result<QuadraticForm> {
    draw.validate()?;
    if !(mass > 0.0 && mass.is_finite()) {
        return Err(CoreError::InvalidParameter(format!(
            "particle mass must be positive, got {mass}"
        )));
    }
    if !(omega >= 0.0 && omega.is_finite()) {
        return Err(CoreError::InvalidParameter(format!(
            "trap frequency must be non-negative, got {omega}"
        )));
    }
    let force = draw.force(p);
    if omega == 0.0 && force != 0.0 {
        return Err(CoreError::InvalidParameter(
            "force noise with ω = 0 has no restoring force; the equilibrium \
             shift ξ/(Mω²) diverges"
                .into(),
        ));
    }
    let mut form = QuadraticForm::zeros(vec![p.x(), p.y()])?;
    let spring = mass * omega * omega;
    for mode in 0..2 {
        form.g_matrix[(2 * mode, 2 * mode)] = spring;
        form.g_matrix[(2 * mode + 1, 2 * mode + 1)] = 1.0 / mass;
    }
    form.linear[0] = force;
    Ok(form)
}

/// Equilibrium displacement ξ/(Mω²) induced by a static trap force ξ.
pub fn equilibrium_shift(force: f64, mass: f64, omega: f64) -> Result<f64> {
    if !(mass > 0.0 && omega > 0.0) {
        return Err(CoreError::InvalidParameter(format!(
            "equilibrium shift needs M > 0 and ω > 0, got M = {mass}, ω = {omega}"
        )));
    }
    Ok(force / (mass * omega * omega))
}

/// Free membrane mode: p̂²/2m_eff + ½ m_eff ω² q̂².
pub fn shield_oscillator_form(mode: &ShieldMode) -> Result<QuadraticForm> {
    let label = ModeLabel::Shield { k: mode.k, l: mode.l };
    let mut form = QuadraticForm::zeros(vec![label])?;
    form.g_matrix[(0, 0)] = mode.effective_mass * mode.omega * mode.omega;
    form.g_matrix[(1, 1)] = 1.0 / mode.effective_mass;
    Ok(form)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::materials::Material;
    use crate::shield::Shield;
    use approx::assert_relative_eq;
    use std::f64::consts::FRAC_PI_2;

    const LAMBDA: f64 = 4.705865948853406e-18;
    const ETA: f64 = 2.075123495130121e-12;
    const DELTA: f64 = 7.011476976869295e-9;
    const L: f64 = 20e-6;
    const D0: f64 = 9e-6;
    const D0M: f64 = 19e-6;

    /// Coefficient of the position–position monomial r_i·r_j in H
    /// (diagonal i = j returns the x̂² coefficient, i.e. G_ii/2).
    fn quad_coeff(f: &QuadraticForm, a: ModeLabel, b: ModeLabel) -> f64 {
        let i = f.pos_index(a).unwrap();
        let j = f.pos_index(b).unwrap();
        if i == j {
            0.5 * f.g_matrix[(i, j)]
        } else {
            f.g_matrix[(i, j)]
        }
    }

    fn lin_coeff(f: &QuadraticForm, a: ModeLabel) -> f64 {
        f.linear[f.pos_index(a).unwrap()]
    }

    #[test]
    fn gravity_reproduces_the_published_orientation_tables() {
        use ModeLabel::*;
        // Parallel (θ = 0): λ(−Lŷ_A − ½ŷ_A² + Lŷ_B − ½ŷ_B² + ŷ_Aŷ_B
        //                     + ¼x̂_A² + ¼x̂_B² − ½x̂_Ax̂_B).
        let par = gravity_form(0.0, 0.0, LAMBDA, L).unwrap();
        assert_relative_eq!(lin_coeff(&par, YA), -LAMBDA * L, max_relative = 1e-12);
        assert_relative_eq!(lin_coeff(&par, YB), LAMBDA * L, max_relative = 1e-12);
        assert!(lin_coeff(&par, XA).abs() < 1e-30);
        assert_relative_eq!(quad_coeff(&par, YA, YA), -0.5 * LAMBDA, max_relative = 1e-9);
        assert_relative_eq!(quad_coeff(&par, YA, YB), LAMBDA, max_relative = 1e-9);
        assert_relative_eq!(quad_coeff(&par, XA, XA), 0.25 * LAMBDA, max_relative = 1e-9);
        assert_relative_eq!(quad_coeff(&par, XA, XB), -0.5 * LAMBDA, max_relative = 1e-9);

        // Linear (θ = π/2): λ(Lx̂_A − ½x̂_A² − Lx̂_B − ½x̂_B² + x̂_Ax̂_B
        //                     + ¼ŷ_A² + ¼ŷ_B² − ½ŷ_Aŷ_B).
        let lin = gravity_form(FRAC_PI_2, FRAC_PI_2, LAMBDA, L).unwrap();
        assert_relative_eq!(lin_coeff(&lin, XA), LAMBDA * L, max_relative = 1e-12);
        assert_relative_eq!(lin_coeff(&lin, XB), -LAMBDA * L, max_relative = 1e-12);
        assert_relative_eq!(quad_coeff(&lin, XA, XA), -0.5 * LAMBDA, max_relative = 1e-9);
        assert_relative_eq!(quad_coeff(&lin, XA, XB), LAMBDA, max_relative = 1e-9);
        assert_relative_eq!(quad_coeff(&lin, YA, YA), 0.25 * LAMBDA, max_relative = 1e-9);
        assert_relative_eq!(quad_coeff(&lin, YA, YB), -0.5 * LAMBDA, max_relative = 1e-9);

        // General equal tilt: entangling coefficient λ(sin²θ − ½cos²θ) and
        // cross term −(3λ/2)sinθcosθ from the exact 1/d̂ expansion.
        let theta = 0.7_f64;
        let gen = gravity_form(theta, theta, LAMBDA, L).unwrap();
        let (s, c) = theta.sin_cos();
        assert_relative_eq!(
            quad_coeff(&gen, XA, XB),
            LAMBDA * (s * s - 0.5 * c * c),
            max_relative = 1e-9
        );
        assert_relative_eq!(
            quad_coeff(&gen, XA, YB),
            -1.5 * LAMBDA * s * c,
            max_relative = 1e-9
        );

        // λ = 0 gives the zero form.
        let zero = gravity_form(0.3, 0.4, 0.0, L).unwrap();
        assert!(zero.g_matrix.iter().all(|v| *v == 0.0));
        assert!(zero.linear.iter().all(|v| *v == 0.0));
    }

    /// Map a single-particle form into the axis gauge used by the
    /// published static tables, which flips (x̂, ŷ) → (−x̂, −ŷ) for both
    /// particles (a canonical transformation flipping momenta too).
    fn flip_axes(f: &QuadraticForm) -> QuadraticForm {
        let mut out = f.clone();
        let n = f.dim();
        let flip = |label: ModeLabel| {
            matches!(
                label,
                ModeLabel::XA | ModeLabel::YA | ModeLabel::XB | ModeLabel::YB
            )
        };
        let sign: Vec<f64> = (0..n)
            .map(|r| if flip(f.modes[r / 2]) { -1.0 } else { 1.0 })
            .collect();
        for i in 0..n {
            out.linear[i] = sign[i] * f.linear[i];
            for j in 0..n {
                out.g_matrix[(i, j)] = sign[i] * sign[j] * f.g_matrix[(i, j)];
            }
        }
        out
    }

    /// Published static gap expansions, both channels and orientations:
    /// coefficient table of monomials (pos_power_x, pos_power_y, ξ^L power,
    /// ξ^θ power) → rational multiple of the coupling. Upper sign =
    /// particle A.
    #[test]
    fn gap_interactions_reproduce_the_published_noise_tables() {
        // Monomials are probed by finite differences in the noise values
        // of the exactly-built coefficient functions.
        type Probe = (&'static str, f64, f64); // (monomial, coeff_A, coeff_B)
        // Casimir, parallel (θ=0): η[±2d₀ŷ −3ŷ² ∓6ξ^Lŷ +12ξ^Lŷ²/d₀
        //   ±12ξ^L²ŷ/d₀ −30ξ^L²ŷ²/d₀² ∓2d₀ξ^θx̂ +6ξ^θx̂ŷ −3ξ^θ²x̂²
        //   ∓d₀ξ^θ²ŷ +3ξ^θ²ŷ²].
        let cas_par: Vec<Probe> = vec![
            ("y", 2.0 * D0, -2.0 * D0),
            ("yy", -3.0, -3.0),
            ("Ly", -6.0, 6.0),
            ("Lyy", 12.0 / D0, 12.0 / D0),
            ("LLy", 12.0 / D0, -12.0 / D0),
            ("LLyy", -30.0 / (D0 * D0), -30.0 / (D0 * D0)),
            ("Tx", -2.0 * D0, 2.0 * D0),
            ("Txy", 6.0, 6.0),
            ("TTxx", -3.0, -3.0),
            ("TTy", -D0, D0),
            ("TTyy", 3.0, 3.0),
        ];
        // Casimir, linear (θ=π/2): η[∓2d₀x̂ −3x̂² ±6ξ^Lx̂ +12ξ^Lx̂²/d₀
        //   ∓12ξ^L²x̂/d₀ −30ξ^L²x̂²/d₀² ∓2d₀ξ^θŷ −6ξ^θx̂ŷ +3ξ^θ²x̂²
        //   ±d₀ξ^θ²x̂ −3ξ^θ²ŷ²].
        let cas_lin: Vec<Probe> = vec![
            ("x", -2.0 * D0, 2.0 * D0),
            ("xx", -3.0, -3.0),
            ("Lx", 6.0, -6.0),
            ("Lxx", 12.0 / D0, 12.0 / D0),
            ("LLx", -12.0 / D0, 12.0 / D0),
            ("LLxx", -30.0 / (D0 * D0), -30.0 / (D0 * D0)),
            ("Ty", -2.0 * D0, 2.0 * D0),
            ("Txy", -6.0, -6.0),
            ("TTxx", 3.0, 3.0),
            ("TTx", D0, -D0),
            ("TTyy", -3.0, -3.0),
        ];
        // Magnetic dipole, parallel: δ[±3d₀ŷ −6ŷ² ∓12ξ^Lŷ +30ξ^Lŷ²/d₀
        //   ±30ξ^L²ŷ/d₀ −90ξ^L²ŷ²/d₀² ∓3d₀ξ^θx̂ +12ξ^θx̂ŷ −6ξ^θ²x̂²
        //   ∓(3/2)d₀ξ^θ²ŷ +6ξ^θ²ŷ²].
        let mag_par: Vec<Probe> = vec![
            ("y", 3.0 * D0M, -3.0 * D0M),
            ("yy", -6.0, -6.0),
            ("Ly", -12.0, 12.0),
            ("Lyy", 30.0 / D0M, 30.0 / D0M),
            ("LLy", 30.0 / D0M, -30.0 / D0M),
            ("LLyy", -90.0 / (D0M * D0M), -90.0 / (D0M * D0M)),
            ("Tx", -3.0 * D0M, 3.0 * D0M),
            ("Txy", 12.0, 12.0),
            ("TTxx", -6.0, -6.0),
            ("TTy", -1.5 * D0M, 1.5 * D0M),
            ("TTyy", 6.0, 6.0),
        ];
        // Magnetic dipole, linear: δ[∓3d₀x̂ −6x̂² ±12ξ^Lx̂ +30ξ^Lx̂²/d₀
        //   ∓30ξ^L²x̂/d₀ −90ξ^L²x̂²/d₀² ∓3d₀ξ^θŷ −12ξ^θx̂ŷ +6ξ^θ²x̂²
        //   ±(3/2)d₀ξ^θ²x̂ −6ξ^θ²ŷ²].
        let mag_lin: Vec<Probe> = vec![
            ("x", -3.0 * D0M, 3.0 * D0M),
            ("xx", -6.0, -6.0),
            ("Lx", 12.0, -12.0),
            ("Lxx", 30.0 / D0M, 30.0 / D0M),
            ("LLx", -30.0 / D0M, 30.0 / D0M),
            ("LLxx", -90.0 / (D0M * D0M), -90.0 / (D0M * D0M)),
            ("Ty", -3.0 * D0M, 3.0 * D0M),
            ("Txy", -12.0, -12.0),
            ("TTxx", 6.0, 6.0),
            ("TTx", 1.5 * D0M, -1.5 * D0M),
            ("TTyy", -6.0, -6.0),
        ];

        let cases: Vec<(GapInteraction, f64, f64, f64, Vec<Probe>)> = vec![
            (GapInteraction::Casimir, 0.0, ETA, D0, cas_par),
            (GapInteraction::Casimir, FRAC_PI_2, ETA, D0, cas_lin),
            (GapInteraction::MagneticDipole, 0.0, DELTA, D0M, mag_par),
            (GapInteraction::MagneticDipole, FRAC_PI_2, DELTA, D0M, mag_lin),
        ];

        for (kind, theta, coupling, d0, probes) in cases {
            for p in [ParticleLabel::A, ParticleLabel::B] {
                // Coefficient of a position monomial at a noise draw, in
                // the published axis gauge.
                let coeff = |xi_l: f64, xi_t: f64, monomial: &str| -> f64 {
                    let draw = NoiseDraw::detector_uncorrelated(xi_l, xi_l, xi_t, xi_t);
                    let f = flip_axes(
                        &gap_interaction_form(p, kind, theta, coupling, d0, &draw, &[]).unwrap(),
                    );
                    match monomial {
                        "x" => lin_coeff(&f, p.x()),
                        "y" => lin_coeff(&f, p.y()),
                        "xx" => quad_coeff(&f, p.x(), p.x()),
                        "yy" => quad_coeff(&f, p.y(), p.y()),
                        "xy" => quad_coeff(&f, p.x(), p.y()),
                        other => panic!("unknown monomial {other}"),
                    }
                };
                let h_l = 1e-4 * d0;
                let h_t = 1e-4;
                for (tag, coeff_a, coeff_b) in &probes {
                    let expected = coupling * if p == ParticleLabel::A { *coeff_a } else { *coeff_b };
                    let noise: String = tag.chars().filter(|c| *c == 'L' || *c == 'T').collect();
                    let pos: String = tag.chars().filter(|c| *c == 'x' || *c == 'y').collect();
                    let f0 = |l: f64, t: f64| coeff(l, t, &pos);
                    let value = match noise.as_str() {
                        "" => f0(0.0, 0.0),
                        "L" => (f0(h_l, 0.0) - f0(-h_l, 0.0)) / (2.0 * h_l),
                        "T" => (f0(0.0, h_t) - f0(0.0, -h_t)) / (2.0 * h_t),
                        "LL" => (f0(h_l, 0.0) - 2.0 * f0(0.0, 0.0) + f0(-h_l, 0.0)) / (h_l * h_l) / 2.0,
                        "TT" => (f0(0.0, h_t) - 2.0 * f0(0.0, 0.0) + f0(0.0, -h_t)) / (h_t * h_t) / 2.0,
                        other => panic!("unknown noise pattern {other}"),
                    };
                    assert_relative_eq!(
                        value,
                        expected,
                        max_relative = 1e-6,
                        epsilon = 1e-6 * coupling.abs()
                    );
                }
            }
        }
    }

    #[test]
    fn shield_coupling_terms_follow_the_selection_rules() {
        let nb = Shield::new(Material::niobium(), 2e-6, 1e-2).unwrap();
        let piston = nb.mode(1, 0).unwrap(); // u0 ≠ 0, du = 0
        let rocking = nb.mode(1, 1).unwrap(); // u0 = 0, du ≠ 0
        let q10 = ModeLabel::Shield { k: 1, l: 0 };
        let q11 = ModeLabel::Shield { k: 1, l: 1 };

        // Linear orientation, piston mode: force ∓2ηd₀u₀ on q̂ and the
        // symmetric bilinear +6ηu₀·q̂x̂ᵢ (same sign for both particles —
        // the entangling piston channel). x̂- and q̂-carrying monomials are
        // gauge-independent here, so no axis flip is needed.
        for (p, force_sign) in [(ParticleLabel::A, -1.0), (ParticleLabel::B, 1.0)] {
            let f = shield_coupling_form(
                p,
                GapInteraction::Casimir,
                FRAC_PI_2,
                ETA,
                D0,
                &piston,
            )
            .unwrap();
            assert_relative_eq!(
                lin_coeff(&f, q10),
                force_sign * 2.0 * ETA * D0 * piston.u0,
                max_relative = 1e-9
            );
            assert_relative_eq!(
                quad_coeff(&f, q10, q10),
                -3.0 * ETA * piston.u0 * piston.u0,
                max_relative = 1e-9
            );
            assert_relative_eq!(
                quad_coeff(&f, p.x(), q10),
                6.0 * ETA * piston.u0,
                max_relative = 1e-9
            );
        }

        // Parallel orientation, rocking mode: no q̂ force, no q̂², only the
        // gradient bilinear ∂u·q̂x̂ᵢ — antisymmetric between A and B (the
        // membrane slope narrows one gap and widens the other; a
        // symmetric convention would decouple the entangling channel).
        let mut grad_coeffs = Vec::new();
        for p in [ParticleLabel::A, ParticleLabel::B] {
            let f = shield_coupling_form(p, GapInteraction::Casimir, 0.0, ETA, D0, &rocking)
                .unwrap();
            assert!(lin_coeff(&f, q11).abs() < 1e-30);
            assert!(quad_coeff(&f, q11, q11).abs() < 1e-25);
            grad_coeffs.push(quad_coeff(&f, p.x(), q11));
        }
        assert_relative_eq!(
            grad_coeffs[0],
            -2.0 * ETA * D0 * rocking.du,
            max_relative = 1e-9
        );
        assert_relative_eq!(grad_coeffs[0], -grad_coeffs[1], max_relative = 1e-9);

        // Frozen SI anchors for the bilinear magnitudes (silica Casimir,
        // lead magnetic couplings).
        let eta_silica = 6.140671567221786e-13;
        assert_relative_eq!(
            2.0 * eta_silica * D0 * rocking.du,
            2.587036732190854e-15,
            max_relative = 1e-8
        );
        assert_relative_eq!(
            6.0 * eta_silica * piston.u0,
            3.889671169675e-12,
            max_relative = 1e-9
        );
        assert_relative_eq!(
            3.0 * DELTA * D0M * rocking.du,
            9.354026332532457e-11,
            max_relative = 1e-8
        );
        assert_relative_eq!(
            12.0 * DELTA * piston.u0,
            8.882526790504547e-8,
            max_relative = 1e-8
        );

        // Magnetic-dipole analogues: ∓3δd₀u₀q̂, −6δu₀²q̂², 12δu₀q̂x̂,
        // 3δd₀,mag∂u·q̂x̂.
        let f = shield_coupling_form(
            ParticleLabel::A,
            GapInteraction::MagneticDipole,
            FRAC_PI_2,
            DELTA,
            D0M,
            &piston,
        )
        .unwrap();
        assert_relative_eq!(
            lin_coeff(&f, q10),
            -3.0 * DELTA * D0M * piston.u0,
            max_relative = 1e-9
        );
        assert_relative_eq!(
            quad_coeff(&f, q10, q10),
            -6.0 * DELTA * piston.u0 * piston.u0,
            max_relative = 1e-9
        );
        assert_relative_eq!(
            quad_coeff(&f, ParticleLabel::A.x(), q10),
            12.0 * DELTA * piston.u0,
            max_relative = 1e-9
        );

        // Zero-amplitude mode gives the static form only.
        let mut dead = piston.clone();
        dead.u0 = 0.0;
        let f = shield_coupling_form(
            ParticleLabel::A,
            GapInteraction::Casimir,
            FRAC_PI_2,
            ETA,
            D0,
            &dead,
        )
        .unwrap();
        assert_eq!(lin_coeff(&f, q10), 0.0);
        assert_eq!(quad_coeff(&f, q10, q10), 0.0);
    }

    #[test]
    fn forms_match_finite_differences_of_the_exact_potentials() {
        // Independent straight-line evaluation of the exact potentials
        // (no jets) at displaced positions, compared against the analytic
        // G and g entries.
        let theta = 0.3_f64;
        let draw = NoiseDraw::detector_uncorrelated(2e-7, -1e-7, 1e-3, 2e-3);

        // Casimir, particle A, including a membrane mode.
        let nb = Shield::new(Material::niobium(), 2e-6, 1e-2).unwrap();
        let rocking = nb.mode(1, 1).unwrap();
        let exact = |x: f64, y: f64, q: f64| -> f64 {
            let s = 1.0; // particle A
            let ang = theta + draw.tilt_a;
            let gap = D0
                + draw.shift_a
                + s * (x * ang.sin() - y * ang.cos())
                - s * q * (rocking.u0 + rocking.du * (x * ang.cos() + y * ang.sin()));
            -ETA * D0.powi(4) / gap.powi(2)
        };
        let form = gap_interaction_form(
            ParticleLabel::A,
            GapInteraction::Casimir,
            theta,
            ETA,
            D0,
            &draw,
            &[ModeCoupling::from(&rocking)],
        )
        .unwrap();
        let h = 1e-9; // ≪ d0, still far above FD noise for these scales
        let coords = [ModeLabel::XA, ModeLabel::YA, ModeLabel::Shield { k: 1, l: 1 }];
        let at = |dx: [f64; 3]| exact(dx[0], dx[1], dx[2]);
        for (i, li) in coords.iter().enumerate() {
            let mut dp = [0.0; 3];
            dp[i] = h;
            let mut dm = [0.0; 3];
            dm[i] = -h;
            let fd = (at(dp) - at(dm)) / (2.0 * h);
            let idx = form.pos_index(*li).unwrap();
            assert_relative_eq!(form.linear[idx], fd, max_relative = 1e-6);
            for (j, lj) in coords.iter().enumerate() {
                let mut dpp = [0.0; 3];
                dpp[i] += h;
                dpp[j] += h;
                let mut dpm = [0.0; 3];
                dpm[i] += h;
                dpm[j] -= h;
                let mut dmp = [0.0; 3];
                dmp[i] -= h;
                dmp[j] += h;
                let mut dmm = [0.0; 3];
                dmm[i] -= h;
                dmm[j] -= h;
                let fd2 = (at(dpp) - at(dpm) - at(dmp) + at(dmm)) / (4.0 * h * h);
                let jdx = form.pos_index(*lj).unwrap();
                assert_relative_eq!(
                    form.g_matrix[(idx, jdx)],
                    fd2,
                    max_relative = 1e-4,
                    epsilon = 1e-6 * form.g_matrix[(idx, jdx)].abs().max(ETA)
                );
            }
        }

        // Gravity at general unequal angles.
        let (ta, tb) = (0.4, 1.1);
        let grav = gravity_form(ta, tb, LAMBDA, L).unwrap();
        let exact_g = |xa: f64, ya: f64, xb: f64, yb: f64| -> f64 {
            let u = (xa * ta.sin() - ya * ta.cos()) - (xb * tb.sin() - yb * tb.cos());
            let v = (xa * ta.cos() + ya * ta.sin()) - (xb * tb.cos() + yb * tb.sin());
            let d = ((2.0 * L + u).powi(2) + v * v).sqrt();
            -LAMBDA * 4.0 * L * L * L / d
        };
        let labels = [ModeLabel::XA, ModeLabel::YA, ModeLabel::XB, ModeLabel::YB];
        let hg = 1e-9;
        for (i, li) in labels.iter().enumerate() {
            for (j, lj) in labels.iter().enumerate() {
                let probe = |si: f64, sj: f64| {
                    let mut d = [0.0; 4];
                    d[i] += si * hg;
                    d[j] += sj * hg;
                    exact_g(d[0], d[1], d[2], d[3])
                };
                let fd2 = (probe(1.0, 1.0) - probe(1.0, -1.0) - probe(-1.0, 1.0)
                    + probe(-1.0, -1.0))
                    / (4.0 * hg * hg);
                let (ii, jj) = (grav.pos_index(*li).unwrap(), grav.pos_index(*lj).unwrap());
                assert_relative_eq!(
                    grav.g_matrix[(ii, jj)],
                    fd2,
                    max_relative = 1e-4,
                    epsilon = 1e-8 * LAMBDA
                );
            }
        }
    }

    #[test]
    fn trap_form_and_equilibrium_shift() {
        let mass = 4.7500880922277685e-11; // lead sphere, R = 10 µm
        let omega = 2.0 * std::f64::consts::PI * 100.0;
        let spring = mass * omega * omega;
        assert_relative_eq!(spring, 1.8752596136245334e-5, max_relative = 1e-10);

        let draw = NoiseDraw::zero().with_forces(spring * 1e-9, 0.0);
        let f = trap_form(ParticleLabel::A, omega, mass, &draw).unwrap();
        assert_relative_eq!(
            quad_coeff(&f, ModeLabel::XA, ModeLabel::XA),
            0.5 * spring,
            max_relative = 1e-12
        );
        let ip = f.mom_index(ModeLabel::XA).unwrap();
        assert_relative_eq!(f.g_matrix[(ip, ip)], 1.0 / mass, max_relative = 1e-15);
        assert_relative_eq!(lin_coeff(&f, ModeLabel::XA), spring * 1e-9, max_relative = 1e-12);
        assert_relative_eq!(
            equilibrium_shift(draw.force_a, mass, omega).unwrap(),
            1e-9,
            max_relative = 1e-12
        );
        assert!(trap_form(ParticleLabel::A, 0.0, mass, &draw).is_err());
    }

    #[test]
    fn assembly_is_order_independent_and_rejects_duplicates() {
        let draw = NoiseDraw::zero();
        let grav = gravity_form(FRAC_PI_2, FRAC_PI_2, LAMBDA, L).unwrap();
        let cas_a = casimir_form(ParticleLabel::A, FRAC_PI_2, ETA, D0, &draw).unwrap();
        let cas_b = casimir_form(ParticleLabel::B, FRAC_PI_2, ETA, D0, &draw).unwrap();
        let trap_a = trap_form(ParticleLabel::A, 628.0, 1e-11, &draw).unwrap();

        let f1 = assemble(&[grav.clone(), cas_a.clone(), cas_b.clone(), trap_a.clone()]).unwrap();
        let f2 = assemble(&[trap_a, cas_b, grav, cas_a]).unwrap();
        assert_eq!(f1.modes, f2.modes);
        assert_relative_eq!(
            (&f1.g_matrix - &f2.g_matrix).iter().map(|v| v.abs()).fold(0.0, f64::max),
            0.0,
            epsilon = 0.0
        );
        assert_eq!(f1.linear, f2.linear);

        let mut dup = QuadraticForm::zeros(vec![ModeLabel::XA]).unwrap();
        dup.modes = vec![ModeLabel::XA, ModeLabel::XA];
        dup.g_matrix = Array2::zeros((4, 4));
        dup.linear = Array1::zeros(4);
        assert!(assemble(&[dup]).is_err());

        // Sum of zero forms is zero over the union.
        let z = assemble(&[
            QuadraticForm::zeros(vec![ModeLabel::XA]).unwrap(),
            QuadraticForm::zeros(vec![ModeLabel::XB]).unwrap(),
        ])
        .unwrap();
        assert!(z.g_matrix.iter().all(|v| *v == 0.0));
        assert_eq!(z.modes, vec![ModeLabel::XA, ModeLabel::XB]);
    }

    #[test]
    fn mirror_symmetry_under_particle_swap_with_correlated_noise() {
        // Reflection through the shield plane: A↔B, q̂→−q̂, ξ^L→−ξ^L, and
        // the axis whose lab components flip: ŷ in the parallel
        // configuration, x̂ in the linear one.
        let nb = Shield::new(Material::niobium(), 2e-6, 1e-2).unwrap();
        let build = |theta: f64, xi: f64| -> QuadraticForm {
            let draw = NoiseDraw::shield_correlated(xi, 0.0);
            let piston = nb.mode(1, 0).unwrap();
            let rocking = nb.mode(1, 1).unwrap();
            let mut pieces = vec![gravity_form(theta, theta, LAMBDA, L).unwrap()];
            for p in [ParticleLabel::A, ParticleLabel::B] {
                pieces.push(
                    gap_interaction_form(
                        p,
                        GapInteraction::Casimir,
                        theta,
                        ETA,
                        D0,
                        &draw,
                        &[ModeCoupling::from(&piston), ModeCoupling::from(&rocking)],
                    )
                    .unwrap(),
                );
                pieces.push(trap_form(p, 628.0, 1e-11, &draw).unwrap());
            }
            pieces.push(shield_oscillator_form(&piston).unwrap());
            pieces.push(shield_oscillator_form(&rocking).unwrap());
            assemble(&pieces).unwrap()
        };

        let xi = 3e-8;
        for (theta, flip_x) in [(0.0, false), (FRAC_PI_2, true)] {
            let plus = build(theta, xi);
            let minus = build(theta, -xi);
            assert_eq!(plus.modes, minus.modes);

            // Mirror permutation-with-signs on quadratures: r ↦ T r.
            let n = plus.dim();
            let mut t = Array2::<f64>::zeros((n, n));
            for (i, m) in plus.modes.iter().enumerate() {
                let (target, sign): (ModeLabel, f64) = match *m {
                    ModeLabel::XA => (ModeLabel::XB, if flip_x { -1.0 } else { 1.0 }),
                    ModeLabel::XB => (ModeLabel::XA, if flip_x { -1.0 } else { 1.0 }),
                    ModeLabel::YA => (ModeLabel::YB, if flip_x { 1.0 } else { -1.0 }),
                    ModeLabel::YB => (ModeLabel::YA, if flip_x { 1.0 } else { -1.0 }),
                    ModeLabel::Shield { .. } => (*m, -1.0),
                };
                let j = plus.index_of(target).unwrap();
                t[(2 * j, 2 * i)] = sign;
                t[(2 * j + 1, 2 * i + 1)] = sign;
            }
            // H_{−ξ}(T r) = H_{+ξ}(r): Tᵀ G₋ T = G₊ and Tᵀ g₋ = g₊.
            let g_t = t.t().dot(&minus.g_matrix).dot(&t);
            let lin_t = t.t().dot(&minus.linear);
            let scale = plus.g_matrix.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            let worst_g = (&g_t - &plus.g_matrix)
                .iter()
                .fold(0.0f64, |a, v| a.max(v.abs()));
            assert!(
                worst_g < 1e-12 * scale,
                "mirror symmetry violated at θ = {theta}: {worst_g:.3e}"
            );
            let lscale = plus.linear.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            let worst_l = (&lin_t - &plus.linear)
                .iter()
                .fold(0.0f64, |a, v| a.max(v.abs()));
            assert!(worst_l < 1e-12 * lscale.max(1e-300));
        }
    }

    #[test]
    fn correlated_shield_noise_leaves_gravity_untouched() {
        // Shield motion does not move the traps: the diagnostic gravity
        // builder must be exactly noise-free for correlated draws, and
        // perturbed at relative order ξ/L for detector draws.
        let clean = gravity_form(FRAC_PI_2, FRAC_PI_2, LAMBDA, L).unwrap();
        let shield = gravity_form_with_noise(
            FRAC_PI_2,
            FRAC_PI_2,
            LAMBDA,
            L,
            &NoiseDraw::shield_correlated(5e-8, 0.0),
        )
        .unwrap();
        let worst = (&clean.g_matrix - &shield.g_matrix)
            .iter()
            .fold(0.0f64, |a, v| a.max(v.abs()));
        assert_eq!(worst, 0.0);

        let xi = 2e-8;
        let detector = gravity_form_with_noise(
            FRAC_PI_2,
            FRAC_PI_2,
            LAMBDA,
            L,
            &NoiseDraw::detector_uncorrelated(xi, xi, 0.0, 0.0),
        )
        .unwrap();
        let c0 = quad_coeff(&clean, ModeLabel::XA, ModeLabel::XB);
        let c1 = quad_coeff(&detector, ModeLabel::XA, ModeLabel::XB);
        let expected = (1.0 + xi / L).powi(-3); // λ ∝ (2L + 2ξ)⁻³
        assert_relative_eq!(c1 / c0, expected, max_relative = 1e-9);
    }

    #[test]
    fn validity_warnings_and_geometry_errors() {
        let draw = NoiseDraw::detector_uncorrelated(2e-6, 0.0, 0.0, 0.0); // > d0/10
        let f = casimir_form(ParticleLabel::A, 0.0, ETA, D0, &draw).unwrap();
        assert!(!f.warnings.is_empty());
        let clean = casimir_form(ParticleLabel::A, 0.0, ETA, D0, &NoiseDraw::zero()).unwrap();
        assert!(clean.warnings.is_empty());

        // A draw that closes the gap entirely is a geometry error.
        let bad = NoiseDraw::detector_uncorrelated(-2.0 * D0, 0.0, 0.0, 0.0);
        assert!(casimir_form(ParticleLabel::A, 0.0, ETA, D0, &bad).is_err());

        // Restriction succeeds for decoupled modes, fails for coupled.
        let grav = gravity_form(FRAC_PI_2, FRAC_PI_2, LAMBDA, L).unwrap();
        let xs = grav.restrict(&[ModeLabel::XA, ModeLabel::XB]).unwrap();
        assert_eq!(xs.n_modes(), 2);
        assert!(grav.restrict(&[ModeLabel::XA]).is_err());

        // Hessians are exactly symmetric by construction.
        assert_eq!(grav.asymmetry(), 0.0);
    }
}
