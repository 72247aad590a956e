//! Two-level cat-state engine.
//!
//! Each particle is prepared in an equal superposition of two wavepackets
//! centred at x̂ = ±Δx along its delocalisation axis. When the packets are
//! narrow and the traps are opened for a time short compared to any
//! motional dynamics, the four branch configurations
//! |s_A s_B⟩, s ∈ {+, −}, evolve only by accumulating phases from the
//! branch-dependent potential energies. The gravitational cross term
//! produces the entangling phase rate
//!
//!   φ = 2 G_{x_A x_B} Δx_A Δx_B / ħ,
//!
//! where G_{x_A x_B} is the x̂_A x̂_B coefficient of the exact quadratic
//! expansion of −G M_A M_B/d̂_AB, and the noise-free logarithmic
//! negativity is E_N(t) = log₂(1 + |sin φt|). Branch-local phases
//! (from linear and single-particle quadratic terms) are omitted: they
//! are removable by local unitaries and change no reported quantity.
//!
//! Quasi-static gap and tilt noise dephases the branches. For each
//! independent draw ξ (after the correlation map) the branch phases
//! shift linearly, α_i = (t/ħ)·∂E_i/∂ξ, and the Gaussian ensemble
//! average damps each coherence exactly:
//!
//!   ρ_ij → ρ_ij · exp(−½ Δξ² (α_i − α_j)²).
//!
//! The sensitivities α_i are evaluated from the exact gap potentials
//! −C d₀^{n+2}/d̂ⁿ at the branch positions, so the widely used
//! leading-order dephasing factors (√8, √72, √18, √288 × coupling·t·Δx·
//! noise/ħ) are reproduced together with their O(Δx/d₀) corrections.
//!
//! A vibrating thermal shield decoheres the branches through the
//! branch-dependent static force F_i it feels from each membrane mode.
//! For a harmonic mode driven by a constant branch force the
//! interaction-picture evolution closes exactly (the Magnus series
//! terminates), giving
//!
//!   ρ_ij → ρ_ij · exp[−(g_i−g_j)² κ₁(t) (n̄+½)] · exp[i f₂(t)(g_i²−g_j²)],
//!
//! with g_i = F_i·√(ħ/2m_eff ω), κ₁ = 4 sin²(ωt/2)/(ħω)² and
//! f₂ = (ωt − sin ωt)/(ħω)². Independent modes contribute additively in
//! the exponent; every coherence revives exactly at the mode periods
//! t = 2πj/ω. Markovian localisation is not modelled here — that channel
//! belongs to the Gaussian engine.

use crate::constants::HBAR;
use crate::error::{CoreError, Result};
use crate::gaussian::{NoiseCorrelation, NoiseKind, NoiseSpec};
use crate::hamiltonians::{gravity_form, GapInteraction, ModeLabel, ParticleLabel};
use crate::linalg::trace_norm_hermitian;
use crate::shield::ShieldMode;
use ndarray::Array2;
use num_complex::Complex64;

/// Branch signs (s_A, s_B) in the fixed basis order |++⟩, |+−⟩, |−+⟩, |−−⟩.
pub const BRANCH_SIGNS: [(f64, f64); 4] = [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)];

/// Exponent (or phase) table over ordered branch pairs.
pub type BranchPairTable = [[f64; 4]; 4];

/// One gap-mediated channel V = −C d₀^{n+2}/d̂ⁿ acting on both particles.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapChannel {
    pub kind: GapInteraction,
    /// Coupling strength C (η or δ) in J.
    pub coupling: f64,
    /// Equilibrium gap d₀ in m.
    pub d0: f64,
}

impl GapChannel {
    /// Relative phase rate |V(d₀−Δx) − V(d₀+Δx)|/ħ between the two
    /// branches of a single particle delocalised by ±Δx along the gap
    /// (linear orientation): the branch closer to the shield sits in a
    /// deeper potential, so the local phases of the superposition run
    /// apart at this rate even in a perfectly static geometry.
    pub fn branch_phase_rate(&self, delta_x: f64) -> Result<f64> {
        if !(delta_x >= 0.0 && delta_x.is_finite()) {
            return Err(CoreError::InvalidParameter(format!(
                "branch separation must be non-negative, got {delta_x}"
            )));
        }
        if delta_x >= self.d0 {
            return Err(CoreError::Geometry(format!(
                "branch separation Δx = {delta_x:.3e} m reaches the gap d₀ = {:.3e} m",
                self.d0
            )));
        }
        let n = self.kind.exponent();
        let c = self.coupling * self.d0.powi(n + 2);
        let v = |d: f64| -c / d.powi(n);
        Ok((v(self.d0 - delta_x) - v(self.d0 + delta_x)).abs() / HBAR)
    }
}

/// One shield membrane mode together with its thermal occupation.
#[derive(Debug, Clone)]
pub struct ThermalMode {
    pub mode: ShieldMode,
    /// Bose occupation n̄ at the shield temperature.
    pub nbar: f64,
}

impl ThermalMode {
    /// Pair a mode with its occupation at temperature `temp` (K).
    pub fn at_temperature(mode: &ShieldMode, temp: f64) -> Result<Self> {
        let nbar = mode.thermal(temp)?.nbar;
        Ok(Self {
            mode: mode.clone(),
            nbar,
        })
    }
}

/// Which noise coordinate a dephasing threshold is searched over.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DephasingAxis {
    /// Gap-length noise ΔL (m).
    GapLength,
    /// Tilt noise Δθ (rad).
    Tilt,
}

/// Two delocalised particles in the two-level (frozen-path) approximation.
#[derive(Debug, Clone)]
pub struct TwoLevelCat {
    /// Delocalisation-axis angles (rad); π/2 = linear, 0 = parallel.
    pub theta_a: f64,
    pub theta_b: f64,
    /// Branch half-separations Δx (m).
    pub dx_a: f64,
    pub dx_b: f64,
    /// Gravitational coupling λ = G M_A M_B/4L³ in J/m².
    pub lambda: f64,
    /// Trap half-separation L (m); the particle separation is 2L.
    pub half_separation: f64,
    /// Gap channels providing noise and shield sensitivity.
    pub channels: Vec<GapChannel>,
}

impl TwoLevelCat {
    pub fn new(
        theta_a: f64,
        theta_b: f64,
        dx_a: f64,
        dx_b: f64,
        lambda: f64,
        half_separation: f64,
        channels: Vec<GapChannel>,
    ) -> Result<Self> {
        for (name, v) in [("θ_A", theta_a), ("θ_B", theta_b)] {
            if !v.is_finite() {
                return Err(CoreError::InvalidParameter(format!(
                    "angle {name} must be finite, got {v}"
                )));
            }
        }
        for (name, v) in [("Δx_A", dx_a), ("Δx_B", dx_b)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(CoreError::InvalidParameter(format!(
                    "branch separation {name} must be positive, got {v}"
                )));
            }
        }
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
        let cat = Self {
            theta_a,
            theta_b,
            dx_a,
            dx_b,
            lambda,
            half_separation,
            channels,
        };
        for ch in &cat.channels {
            if !(ch.coupling >= 0.0 && ch.coupling.is_finite()) {
                return Err(CoreError::InvalidParameter(format!(
                    "channel coupling must be non-negative, got {}",
                    ch.coupling
                )));
            }
            if !(ch.d0 > 0.0 && ch.d0.is_finite()) {
                return Err(CoreError::Geometry(format!(
                    "channel gap must be positive, got {}",
                    ch.d0
                )));
            }
            // Every branch must leave the gap open.
            for p in [ParticleLabel::A, ParticleLabel::B] {
                for s in [1.0, -1.0] {
                    cat.branch_gap(ch, p, s, 0.0, 0.0)?;
                }
            }
        }
        Ok(cat)
    }

    fn theta(&self, p: ParticleLabel) -> f64 {
        match p {
            ParticleLabel::A => self.theta_a,
            ParticleLabel::B => self.theta_b,
        }
    }

    fn dx(&self, p: ParticleLabel) -> f64 {
        match p {
            ParticleLabel::A => self.dx_a,
            ParticleLabel::B => self.dx_b,
        }
    }

    /// Exact gap of particle `p` in branch `s` under a (shift, tilt) draw.
    fn branch_gap(
        &self,
        ch: &GapChannel,
        p: ParticleLabel,
        s: f64,
        shift: f64,
        tilt: f64,
    ) -> Result<f64> {
        let gap = ch.d0 + shift + p.gap_sign() * s * self.dx(p) * (self.theta(p) + tilt).sin();
        if gap <= 0.0 {
            return Err(CoreError::Geometry(format!(
                "branch s = {s:+.0} of particle {p:?} closes the gap: d̂ = {gap:.3e} m"
            )));
        }
        Ok(gap)
    }

    /// Entangling phase rate φ = 2 G_{x_A x_B} Δx_A Δx_B / ħ in rad/s,
    /// from the exact gravitational Hessian.
    pub fn phase_rate(&self) -> Result<f64> {
        let form = gravity_form(
            self.theta_a,
            self.theta_b,
            self.lambda,
            self.half_separation,
        )?;
        let ia = form.pos_index(ModeLabel::XA)?;
        let ib = form.pos_index(ModeLabel::XB)?;
        // ½rᵀGr counts the (x_A, x_B) entry twice.
        Ok(2.0 * form.g_matrix[(ia, ib)] * self.dx_a * self.dx_b / HBAR)
    }

    /// Noise-free logarithmic negativity E_N(t) = log₂(1 + |sin φt|).
    pub fn pure_negativity(&self, t: f64) -> Result<f64> {
        Ok((1.0 + (self.phase_rate()? * t).sin().abs()).log2())
    }

    /// Exact (∂V/∂shift, ∂V/∂tilt) for particle `p` in branch `s`,
    /// summed over channels, at zero noise.
    fn branch_slopes(&self, p: ParticleLabel, s: f64) -> Result<(f64, f64)> {
        let mut d_shift = 0.0;
        let mut d_tilt = 0.0;
        for ch in &self.channels {
            let n = ch.kind.exponent();
            let gap = self.branch_gap(ch, p, s, 0.0, 0.0)?;
            // V = −C d₀^{n+2}/d̂ⁿ ⇒ ∂V/∂d̂ = n C d₀^{n+2}/d̂^{n+1}.
            let dv_dgap = f64::from(n) * ch.coupling * ch.d0.powi(n + 2) / gap.powi(n + 1);
            d_shift += dv_dgap;
            d_tilt += dv_dgap * p.gap_sign() * s * self.dx(p) * self.theta(p).cos();
        }
        Ok((d_shift, d_tilt))
    }

    /// Branch phase sensitivities per independent noise draw.
    ///
    /// Returns (RMS amplitude, α) pairs where α_i = (t/ħ)·∂E_i/∂ξ is the
    /// accumulated-phase slope of branch i with respect to the draw.
    /// Under the correlated map one gap draw moves both gaps in opposite
    /// directions and one tilt draw rotates both axes together, so the
    /// per-particle slopes add within a single α; under the uncorrelated
    /// map each particle gets its own draws. Trap-force draws are always
    /// independent and shift branch i by −ξ s_p Δx_p.
    pub fn phase_sensitivities(&self, t: f64, noise: &NoiseSpec) -> Result<Vec<(f64, [f64; 4])>> {
        noise.validate()?;
        if !(t >= 0.0 && t.is_finite()) {
            return Err(CoreError::InvalidParameter(format!(
                "time must be non-negative, got {t}"
            )));
        }
        // slopes[particle][branch-sign index 0 ↦ +1, 1 ↦ −1]
        let mut shift_slope = [[0.0f64; 2]; 2];
        let mut tilt_slope = [[0.0f64; 2]; 2];
        for (pi, p) in [ParticleLabel::A, ParticleLabel::B].into_iter().enumerate() {
            for (si, s) in [1.0, -1.0].into_iter().enumerate() {
                let (dl, dth) = self.branch_slopes(p, s)?;
                shift_slope[pi][si] = dl;
                tilt_slope[pi][si] = dth;
            }
        }
        let idx = |s: f64| if s > 0.0 { 0 } else { 1 };
        let branch = |f: &dyn Fn(usize, usize) -> f64| -> [f64; 4] {
            let mut a = [0.0; 4];
            for (i, (sa, sb)) in BRANCH_SIGNS.iter().enumerate() {
                a[i] = f(idx(*sa), idx(*sb));
            }
            a
        };
        let scale = t / HBAR;
        let mut axes = Vec::new();
        match noise.correlation {
            NoiseCorrelation::ShieldCorrelated => {
                if noise.delta_l > 0.0 {
                    // ξ_A = +ξ, ξ_B = −ξ.
                    axes.push((
                        noise.delta_l,
                        branch(&|a, b| scale * (shift_slope[0][a] - shift_slope[1][b])),
                    ));
                }
                if noise.delta_theta > 0.0 {
                    // Common tilt of both axes.
                    axes.push((
                        noise.delta_theta,
                        branch(&|a, b| scale * (tilt_slope[0][a] + tilt_slope[1][b])),
                    ));
                }
            }
            NoiseCorrelation::DetectorUncorrelated => {
                if noise.delta_l > 0.0 {
                    axes.push((
                        noise.delta_l,
                        branch(&|a, _| scale * shift_slope[0][a]),
                    ));
                    axes.push((
                        noise.delta_l,
                        branch(&|_, b| scale * shift_slope[1][b]),
                    ));
                }
                if noise.delta_theta > 0.0 {
                    axes.push((
                        noise.delta_theta,
                        branch(&|a, _| scale * tilt_slope[0][a]),
                    ));
                    axes.push((
                        noise.delta_theta,
                        branch(&|_, b| scale * tilt_slope[1][b]),
                    ));
                }
            }
        }
        if noise.delta_force > 0.0 {
            // A static force ξ adds −ξ x̂ per particle: a random local
            // phase, which still damps that particle's branch coherences.
            axes.push((
                noise.delta_force,
                branch(&|a, _| -scale * [1.0, -1.0][a] * self.dx_a),
            ));
            axes.push((
                noise.delta_force,
                branch(&|_, b| -scale * [1.0, -1.0][b] * self.dx_b),
            ));
        }
        Ok(axes)
    }

    /// Pairwise damping exponents D_ij = Σ_draws ½Δξ²(α_i−α_j)².
    pub fn damping_exponents(&self, t: f64, noise: &NoiseSpec) -> Result<BranchPairTable> {
        let mut d = [[0.0f64; 4]; 4];
        for (sigma, alpha) in self.phase_sensitivities(t, noise)? {
            for i in 0..4 {
                for j in 0..4 {
                    let da = alpha[i] - alpha[j];
                    d[i][j] += 0.5 * sigma * sigma * da * da;
                }
            }
        }
        Ok(d)
    }

    /// Exact static force (J/m, conjugate to q̂) of branch (s_A, s_B) on
    /// shield mode `mode`, summed over channels.
    fn branch_shield_force(&self, mode: &ShieldMode, s_a: f64, s_b: f64) -> Result<f64> {
        let mut f = 0.0;
        for ch in &self.channels {
            let n = ch.kind.exponent();
            for (p, s) in [(ParticleLabel::A, s_a), (ParticleLabel::B, s_b)] {
                let gap = self.branch_gap(ch, p, s, 0.0, 0.0)?;
                let dv_dgap = f64::from(n) * ch.coupling * ch.d0.powi(n + 2) / gap.powi(n + 1);
                // d̂ ⊃ −gap_sign·q̂·[u₀ + ∂u·x̂ cosΘ] with x̂ = sΔx.
                let dgap_dq =
                    -p.gap_sign() * (mode.u0 + mode.du * s * self.dx(p) * self.theta(p).cos());
                f += dv_dgap * dgap_dq;
            }
        }
        Ok(f)
    }

    /// Thermal-shield damping and phase exponents over branch pairs:
    /// ρ_ij → ρ_ij·exp(−damping_ij)·exp(i·phase_ij).
    pub fn shield_exponents(
        &self,
        t: f64,
        modes: &[ThermalMode],
    ) -> Result<(BranchPairTable, BranchPairTable)> {
        if !(t >= 0.0 && t.is_finite()) {
            return Err(CoreError::InvalidParameter(format!(
                "time must be non-negative, got {t}"
            )));
        }
        let mut damping = [[0.0f64; 4]; 4];
        let mut phase = [[0.0f64; 4]; 4];
        for tm in modes {
            let omega = tm.mode.omega;
            if !(omega > 0.0 && omega.is_finite()) {
                return Err(CoreError::InvalidParameter(format!(
                    "shield mode frequency must be positive, got {omega}"
                )));
            }
            if !(tm.mode.effective_mass > 0.0 && tm.mode.effective_mass.is_finite()) {
                return Err(CoreError::InvalidParameter(format!(
                    "shield mode effective mass must be positive, got {}",
                    tm.mode.effective_mass
                )));
            }
            if !(tm.nbar >= 0.0 && tm.nbar.is_finite()) {
                return Err(CoreError::InvalidParameter(format!(
                    "occupation must be non-negative, got {}",
                    tm.nbar
                )));
            }
            let x_zpf = (HBAR / (2.0 * tm.mode.effective_mass * omega)).sqrt();
            let mut g = [0.0f64; 4];
            for (i, (sa, sb)) in BRANCH_SIGNS.iter().enumerate() {
                g[i] = self.branch_shield_force(&tm.mode, *sa, *sb)? * x_zpf;
            }
            let hw = HBAR * omega;
            let kappa1 = 4.0 * (0.5 * omega * t).sin().powi(2) / (hw * hw);
            let f2 = (omega * t - (omega * t).sin()) / (hw * hw);
            for i in 0..4 {
                for j in 0..4 {
                    let dg = g[i] - g[j];
                    damping[i][j] += dg * dg * kappa1 * (tm.nbar + 0.5);
                    phase[i][j] += f2 * (g[i] * g[i] - g[j] * g[j]);
                }
            }
        }
        Ok((damping, phase))
    }

    /// Branch density matrix after time `t` under quasi-static noise and
    /// thermal shield modes, in the [`BRANCH_SIGNS`] basis.
    pub fn density_matrix(
        &self,
        t: f64,
        noise: &NoiseSpec,
        shields: &[ThermalMode],
    ) -> Result<Array2<Complex64>> {
        if noise.kind == NoiseKind::Markovian || noise.diffusion > 0.0 {
            return Err(CoreError::InvalidParameter(
                "the two-level engine models quasi-static dephasing only; \
                 Markovian localisation belongs to the Gaussian engine"
                    .into(),
            ));
        }
        let phi = self.phase_rate()?;
        // Branch phases χ_i = −E_i t/ħ with E_i = (φħ/2)(s_A s_B)_i.
        let chi: Vec<f64> = BRANCH_SIGNS
            .iter()
            .map(|(sa, sb)| -0.5 * phi * t * sa * sb)
            .collect();
        let d_noise = self.damping_exponents(t, noise)?;
        let (d_shield, ph_shield) = self.shield_exponents(t, shields)?;
        let rho = Array2::from_shape_fn((4, 4), |(i, j)| {
            let amp = 0.25 * (-d_noise[i][j] - d_shield[i][j]).exp();
            Complex64::from_polar(amp, chi[i] - chi[j] + ph_shield[i][j])
        });
        Ok(rho)
    }

    /// Logarithmic negativity E_N(t) under noise and thermal shield modes.
    pub fn log_negativity(&self, t: f64, noise: &NoiseSpec, shields: &[ThermalMode]) -> Result<f64> {
        two_qubit_log_negativity(&self.density_matrix(t, noise, shields)?)
    }

    /// RMS noise amplitude on `axis` at which E_N(t) falls to `target`.
    ///
    /// E_N decreases monotonically with the amplitude, so the crossing is
    /// bracketed geometrically and bisected in log space.
    pub fn noise_threshold(
        &self,
        t: f64,
        axis: DephasingAxis,
        correlation: NoiseCorrelation,
        target: f64,
    ) -> Result<f64> {
        if !(target > 0.0 && target.is_finite()) {
            return Err(CoreError::InvalidParameter(format!(
                "threshold target must be positive, got {target}"
            )));
        }
        let en = |amp: f64| -> Result<f64> {
            let mut spec = NoiseSpec::quiet();
            spec.correlation = correlation;
            match axis {
                DephasingAxis::GapLength => spec.delta_l = amp,
                DephasingAxis::Tilt => spec.delta_theta = amp,
            }
            self.log_negativity(t, &spec, &[])
        };
        let quiet = en(0.0)?;
        if quiet <= target {
            return Err(CoreError::InvalidParameter(format!(
                "noise-free E_N = {quiet:.6} already at or below the target {target:.6}; \
                 no threshold to find"
            )));
        }
        let mut lo = 1e-24;
        if en(lo)? <= target {
            // Already past the crossing at the smallest probe: shrink.
            for _ in 0..40 {
                lo /= 1e3;
                if en(lo)? > target {
                    break;
                }
            }
            if en(lo)? <= target {
                return Err(CoreError::Numeric(
                    "threshold bracketing failed below 1e-144".into(),
                ));
            }
        }
        let mut hi = lo;
        let mut bracketed = false;
        for _ in 0..200 {
            hi *= 4.0;
            if en(hi)? < target {
                bracketed = true;
                break;
            }
        }
        if !bracketed {
            return Err(CoreError::InvalidParameter(format!(
                "E_N is insensitive to {axis:?} noise in this configuration; \
                 no threshold exists"
            )));
        }
        for _ in 0..200 {
            if hi / lo - 1.0 < 1e-13 {
                break;
            }
            let mid = (lo * hi).sqrt();
            if en(mid)? > target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok((lo * hi).sqrt())
    }
}

/// Logarithmic negativity E_N = log₂‖ρ^{T_B}‖₁ of a two-qubit state in
/// the product basis |s_A s_B⟩ = (++, +−, −+, −−).
pub fn two_qubit_log_negativity(rho: &Array2<Complex64>) -> Result<f64> {
    if rho.nrows() != 4 || rho.ncols() != 4 {
        return Err(CoreError::Composition(format!(
            "two-qubit state must be 4×4, got {}×{}",
            rho.nrows(),
            rho.ncols()
        )));
    }
    let trace: Complex64 = (0..4).map(|i| rho[(i, i)]).sum();
    if (trace.re - 1.0).abs() > 1e-8 || trace.im.abs() > 1e-12 {
        return Err(CoreError::NonPhysicalState(format!(
            "two-qubit state has trace {trace}, expected 1"
        )));
    }
    // Partial transpose on B: (ρ^{T_B})_{(a b),(a' b')} = ρ_{(a b'),(a' b)}.
    let pt = Array2::from_shape_fn((4, 4), |(i, j)| {
        let (a, b) = (i / 2, i % 2);
        let (ap, bp) = (j / 2, j % 2);
        rho[(2 * a + bp, 2 * ap + b)]
    });
    let tn = trace_norm_hermitian(&pt)?;
    Ok(tn.max(1.0).log2())
}

/// Closed-form E_N for equal per-particle dephasing γ² with independent
/// draws on each particle, at coherence s = sin φt:
/// E_N = max{0, log₂[½(1+e^{−2γ²}) + e^{−γ²}|s|]}.
pub fn en_two_level_uncorrelated(gamma_sq: f64, s: f64) -> f64 {
    (0.5 * (1.0 + (-2.0 * gamma_sq).exp()) + (-gamma_sq).exp() * s.abs())
        .log2()
        .max(0.0)
}

/// Closed-form E_N for equal per-particle dephasing γ² from one shared
/// draw (the two contributions add in one branch-pair and cancel in the
/// other), at coherence s = sin φt:
/// E_N = max{0, log₂[¼(3+e^{−4γ²}) + ½√(4e^{−2γ²}s² + ¼(1−e^{−4γ²})²)]}.
pub fn en_two_level_correlated(gamma_sq: f64, s: f64) -> f64 {
    let e4 = (-4.0 * gamma_sq).exp();
    let root = (4.0 * (-2.0 * gamma_sq).exp() * s * s + 0.25 * (1.0 - e4) * (1.0 - e4)).sqrt();
    (0.25 * (3.0 + e4) + 0.5 * root).log2().max(0.0)
}
