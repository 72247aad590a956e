//! Gaussian-state engine: exact flows of quadratic Hamiltonians with
//! static (quasi-static) and Markovian noise.
//!
//! # Conventions
//!
//! Every mode m carries a length scale x₀,m. Quadratures are
//! dimensionless, X = x/x₀ and P = p·x₀/ħ, interleaved as
//! r = (X₁, P₁, X₂, P₂, …), so the vacuum covariance is ½𝟙 and a
//! prepared wavepacket of spread Δx has V = diag(Δ², 1/4Δ²) with
//! Δ = Δx/x₀. The scale is a free numerical choice (logarithmic
//! negativity is invariant under the symplectic rescaling that connects
//! two choices): released-particle runs use x₀ = Δx so the drift stays
//! tame, trapped runs use the oscillator length x₀ = √(ħ/Mω) so the
//! drift matrix is balanced, and membrane modes use their zero-point
//! length x₀ = √(ħ/m_eff ω). An SI form H = ½rᵀG r + gᵀr maps to
//!
//! ```text
//! G̃ = T G T / ħ,   g̃ = T g / ħ,   T = diag(x₀, ħ/x₀, …),
//! ```
//!
//! and generates the drift K = Ω G̃ (units 1/s). For constant K the flow is
//! exact: S(t) = e^{Kt} and J(t) = ∫₀ᵗ e^{Ks} ds come from one Van Loan
//! augmented exponential, giving
//!
//! ```text
//! d(t) = S d(0) + J Ω g̃,      σ(t) = S σ(0) Sᵀ (+ diffusion).
//! ```
//!
//! # States
//!
//! [`GaussianState`] stores the first moments d and the *second-moment*
//! matrix V = σ + ddᵀ rather than σ itself: a quasi-static ensemble
//! average is then simply ⟨V⟩ and ⟨d⟩ accumulated node by node, and the
//! physical covariance of the mixture is recovered as σ̄ = ⟨V⟩ − ⟨d⟩⟨d⟩ᵀ.
//!
//! # Noise
//!
//! Quasi-static noise (correlation time ≫ evolution time) is averaged by
//! tensor Gauss–Hermite quadrature over the active gap/tilt dimensions —
//! a correlated shield draw moves both gaps oppositely with one value,
//! detector draws are independent per particle — while trap-force noise,
//! which enters only the linear term, is integrated in closed form through
//! its displacement response v = J Ω g̃_unit: each independent force adds
//! Δξ²·vvᵀ to the node covariance. Static (noise-independent) linear
//! terms describe the common equilibrium shift towards the shield; they
//! are identical in every branch of the ensemble and are stripped before
//! propagation, which is equivalent to expanding about the true static
//! equilibrium. A Markovian position-localisation channel instead adds a
//! constant momentum-diffusion matrix 𝒟 = (D x₀²/ħ²)·diag(0, 1) per
//! affected mode and is integrated exactly alongside the flow.

use crate::error::{CoreError, Result};
use crate::hamiltonians::{ModeLabel, NoiseDraw, QuadraticForm};
use crate::linalg;
use crate::negativity;
use crate::quadrature::{monte_carlo_gaussian, tensor_gauss_hermite};
use ndarray::{Array1, Array2};

/// Reduced Planck constant in J·s.
use crate::constants::HBAR;

/// Gaussian state over labelled modes: first moments `mean` (d) and
/// second moments `second` (V = σ + ddᵀ), both dimensionless.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianState {
    pub modes: Vec<ModeLabel>,
    pub mean: Array1<f64>,
    pub second: Array2<f64>,
}

impl GaussianState {
    /// Build from a covariance matrix and mean vector.
    pub fn from_moments(
        modes: Vec<ModeLabel>,
        mean: Array1<f64>,
        sigma: Array2<f64>,
    ) -> Result<Self> {
        let dim = 2 * modes.len();
        if mean.len() != dim || sigma.dim() != (dim, dim) {
            return Err(CoreError::InvalidParameter(format!(
                "moment dimensions {}/{:?} do not match {} modes",
                mean.len(),
                sigma.dim(),
                modes.len()
            )));
        }
        let second = &sigma + &outer(&mean, &mean);
        Ok(Self { modes, mean, second })
    }

    /// Product state ⊕_m (1 + 2n̄_m)·diag(Δ_m², 1/(4Δ_m²)) with zero mean:
    /// `deltas` are position spreads in units of each mode's x₀ (1 for a
    /// prepared particle axis, 1/√2 for a membrane mode), `nbars` thermal
    /// occupations.
    pub fn prepared(modes: Vec<ModeLabel>, deltas: &[f64], nbars: &[f64]) -> Result<Self> {
        let n = modes.len();
        if deltas.len() != n || nbars.len() != n {
            return Err(CoreError::InvalidParameter(format!(
                "need one Δ and one n̄ per mode: {n} modes, {} Δ, {} n̄",
                deltas.len(),
                nbars.len()
            )));
        }
        let mut sigma = Array2::<f64>::zeros((2 * n, 2 * n));
        for m in 0..n {
            let delta = deltas[m];
            let nbar = nbars[m];
            if !(delta > 0.0 && delta.is_finite()) {
                return Err(CoreError::InvalidParameter(format!(
                    "position spread must be positive, got Δ = {delta}"
                )));
            }
            if !(nbar >= 0.0 && nbar.is_finite()) {
                return Err(CoreError::InvalidParameter(format!(
                    "thermal occupation must be non-negative, got n̄ = {nbar}"
                )));
            }
            let env = 1.0 + 2.0 * nbar;
            sigma[(2 * m, 2 * m)] = env * delta * delta;
            sigma[(2 * m + 1, 2 * m + 1)] = env / (4.0 * delta * delta);
        }
        Self::from_moments(modes, Array1::zeros(2 * n), sigma)
    }

    /// Covariance σ = V − ddᵀ.
    pub fn sigma(&self) -> Array2<f64> {
        &self.second - &outer(&self.mean, &self.mean)
    }

    pub fn n_modes(&self) -> usize {
        self.modes.len()
    }

    fn mode_index(&self, label: ModeLabel) -> Result<usize> {
        self.modes
            .iter()
            .position(|m| *m == label)
            .ok_or_else(|| CoreError::Composition(format!("mode {label} not present in state")))
    }

    /// Verify the uncertainty relation on σ.
    pub fn check_physical(&self) -> Result<()> {
        negativity::check_physical(&self.sigma())
    }

    /// Purity Tr ρ² of the Gaussian state.
    pub fn purity(&self) -> Result<f64> {
        negativity::purity(&self.sigma())
    }

    /// Logarithmic negativity across (rest | `b_side`).
    pub fn log_negativity(&self, b_side: &[ModeLabel]) -> Result<f64> {
        let idx: Vec<usize> = b_side
            .iter()
            .map(|l| self.mode_index(*l))
            .collect::<Result<_>>()?;
        negativity::logarithmic_negativity(&self.sigma(), &idx)
    }

    /// Partial trace: keep only `keep` modes (drop rows/columns of the
    /// others — exact for Gaussian states).
    pub fn trace_out_to(&self, keep: &[ModeLabel]) -> Result<Self> {
        let idx: Vec<usize> = keep
            .iter()
            .map(|l| self.mode_index(*l))
            .collect::<Result<_>>()?;
        let dim = 2 * idx.len();
        let mut mean = Array1::zeros(dim);
        let mut second = Array2::zeros((dim, dim));
        for (a, &i) in idx.iter().enumerate() {
            for q in 0..2 {
                mean[2 * a + q] = self.mean[2 * i + q];
                for (b, &j) in idx.iter().enumerate() {
                    for s in 0..2 {
                        second[(2 * a + q, 2 * b + s)] = self.second[(2 * i + q, 2 * j + s)];
                    }
                }
            }
        }
        Ok(Self {
            modes: keep.to_vec(),
            mean,
            second,
        })
    }
}

fn outer(a: &Array1<f64>, b: &Array1<f64>) -> Array2<f64> {
    let mut out = Array2::zeros((a.len(), b.len()));
    for i in 0..a.len() {
        for j in 0..b.len() {
            out[(i, j)] = a[i] * b[j];
        }
    }
    out
}

/// Look up the length scale of every mode of `form` in `scales`.
fn aligned_scales(form: &QuadraticForm, scales: &[(ModeLabel, f64)]) -> Result<Vec<f64>> {
    form.modes
        .iter()
        .map(|m| {
            let x0 = scales
                .iter()
                .find(|(l, _)| l == m)
                .map(|(_, x0)| *x0)
                .ok_or_else(|| {
                    CoreError::Composition(format!("no length scale supplied for mode {m}"))
                })?;
            if !(x0 > 0.0 && x0.is_finite()) {
                return Err(CoreError::InvalidParameter(format!(
                    "length scale for mode {m} must be positive, got {x0}"
                )));
            }
            Ok(x0)
        })
        .collect()
}

/// Exact flow generator for one quadratic form: drift K = ΩG̃ and
/// dimensionless drive g̃.
#[derive(Debug, Clone)]
pub struct Propagator {
    pub modes: Vec<ModeLabel>,
    /// Drift matrix K = Ω G̃ in 1/s.
    pub drift: Array2<f64>,
    /// Dimensionless drive g̃ = T g/ħ in 1/s.
    pub drive: Array1<f64>,
}

impl Propagator {
    pub fn new(form: &QuadraticForm, scales: &[(ModeLabel, f64)]) -> Result<Self> {
        let x0 = aligned_scales(form, scales)?;
        let n = form.n_modes();
        let dim = 2 * n;
        let mut t_diag = Array1::<f64>::zeros(dim);
        for m in 0..n {
            t_diag[2 * m] = x0[m];
            t_diag[2 * m + 1] = HBAR / x0[m];
        }
        let mut g_tilde = Array2::<f64>::zeros((dim, dim));
        for i in 0..dim {
            for j in 0..dim {
                g_tilde[(i, j)] = t_diag[i] * form.g_matrix[(i, j)] * t_diag[j] / HBAR;
            }
        }
        let omega = linalg::symplectic_form(n);
        let drift = omega.dot(&g_tilde);
        let drive = Array1::from_iter(
            (0..dim).map(|i| t_diag[i] * form.linear[i] / HBAR),
        );
        Ok(Self {
            modes: form.modes.clone(),
            drift,
            drive,
        })
    }

    fn omega(&self) -> Array2<f64> {
        linalg::symplectic_form(self.modes.len())
    }

    /// Propagator pair (S(t), J(t) = ∫₀ᵗ S).
    pub fn flow(&self, t: f64) -> Result<(Array2<f64>, Array2<f64>)> {
        if !(t >= 0.0 && t.is_finite()) {
            return Err(CoreError::InvalidParameter(format!(
                "evolution time must be non-negative and finite, got {t}"
            )));
        }
        linalg::propagator_with_integral(&self.drift, t)
    }

    /// Unitary evolution of the state for time `t`.
    pub fn propagate(&self, state: &GaussianState, t: f64) -> Result<GaussianState> {
        self.propagate_with(state, t, None)
    }

    /// Evolution with a constant diffusion matrix 𝒟 (dimensionless/s):
    /// σ̇ = Kσ + σKᵀ + 𝒟, integrated exactly via the Van Loan block
    /// exponential.
    pub fn propagate_diffusive(
        &self,
        state: &GaussianState,
        t: f64,
        diffusion: &Array2<f64>,
    ) -> Result<GaussianState> {
        self.propagate_with(state, t, Some(diffusion))
    }

    fn propagate_with(
        &self,
        state: &GaussianState,
        t: f64,
        diffusion: Option<&Array2<f64>>,
    ) -> Result<GaussianState> {
        if state.modes != self.modes {
            return Err(CoreError::Composition(
                "state and propagator mode lists differ".into(),
            ));
        }
        let (s, j) = self.flow(t)?;
        let mean = s.dot(&state.mean) + j.dot(&self.omega().dot(&self.drive));
        let mut sigma = s.dot(&state.sigma()).dot(&s.t());
        if let Some(d) = diffusion {
            if d.dim() != sigma.dim() {
                return Err(CoreError::InvalidParameter(format!(
                    "diffusion matrix shape {:?} does not match state dimension {:?}",
                    d.dim(),
                    sigma.dim()
                )));
            }
            sigma = sigma + linalg::diffusion_integral(&self.drift, d, t)?;
        }
        GaussianState::from_moments(self.modes.clone(), mean, sigma)
    }

    /// Displacement response d(t) = J(t) Ω g̃ to an SI linear term `g_si`.
    pub fn drive_response(&self, t: f64, g_si: &Array1<f64>, scales: &[(ModeLabel, f64)]) -> Result<Array1<f64>> {
        if g_si.len() != 2 * self.modes.len() {
            return Err(CoreError::InvalidParameter(
                "drive vector dimension mismatch".into(),
            ));
        }
        let x0 = aligned_scales(
            &QuadraticForm::zeros(self.modes.clone())?,
            scales,
        )?;
        let dim = g_si.len();
        let mut g_tilde = Array1::<f64>::zeros(dim);
        for m in 0..self.modes.len() {
            g_tilde[2 * m] = x0[m] * g_si[2 * m] / HBAR;
            g_tilde[2 * m + 1] = (HBAR / x0[m]) * g_si[2 * m + 1] / HBAR;
        }
        let (_, j) = self.flow(t)?;
        Ok(j.dot(&self.omega().dot(&g_tilde)))
    }

    /// Largest defect of the symplectic identity SᵀΩS = Ω at time `t` —
    /// an exactness diagnostic for Hamiltonian flows (no diffusion).
    pub fn symplectic_defect(&self, t: f64) -> Result<f64> {
        let (s, _) = self.flow(t)?;
        let omega = self.omega();
        let res = s.t().dot(&omega).dot(&s) - &omega;
        Ok(res.iter().fold(0.0f64, |a, v| a.max(v.abs())))
    }
}

/// Noise channel kinds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseKind {
    /// Static over each run, Gaussian across the ensemble.
    QuasiStatic,
    /// Delta-correlated momentum diffusion.
    Markovian,
}

/// Which draws are shared between the two particles.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseCorrelation {
    /// One gap draw (opposite signs) and one tilt draw (same sign).
    ShieldCorrelated,
    /// Independent gap and tilt draws per particle.
    DetectorUncorrelated,
}

/// Static/Markovian noise description.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    pub kind: NoiseKind,
    /// RMS gap-length noise ΔL in m.
    pub delta_l: f64,
    /// RMS tilt noise Δθ in rad.
    pub delta_theta: f64,
    /// RMS trap-force noise Δξ in N (per particle, always independent).
    pub delta_force: f64,
    pub correlation: NoiseCorrelation,
    /// Markovian position-localisation strength D in J²·s/m² (the scale
    /// ħλ marks the gravitational-entanglement threshold).
    pub diffusion: f64,
    /// Correlation time in s (∞ ≙ quasi-static; recorded for reporting).
    pub correlation_time: f64,
}

impl NoiseSpec {
    pub fn quiet() -> Self {
        Self {
            kind: NoiseKind::QuasiStatic,
            delta_l: 0.0,
            delta_theta: 0.0,
            delta_force: 0.0,
            correlation: NoiseCorrelation::ShieldCorrelated,
            diffusion: 0.0,
            correlation_time: f64::INFINITY,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("ΔL", self.delta_l),
            ("Δθ", self.delta_theta),
            ("Δξ", self.delta_force),
            ("D", self.diffusion),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(CoreError::InvalidParameter(format!(
                    "noise amplitude {name} must be non-negative and finite, got {v}"
                )));
            }
        }
        if self.correlation_time < 0.0 {
            return Err(CoreError::InvalidParameter(format!(
                "correlation time must be non-negative, got {}",
                self.correlation_time
            )));
        }
        Ok(())
    }
}

/// Momentum-diffusion matrix 𝒟 = (D x₀²/ħ²) diag(0, 1) on each of the
/// `targets` modes, zero elsewhere.
pub fn momentum_diffusion(
    modes: &[ModeLabel],
    scales: &[(ModeLabel, f64)],
    targets: &[ModeLabel],
    d_si: f64,
) -> Result<Array2<f64>> {
    if !(d_si >= 0.0 && d_si.is_finite()) {
        return Err(CoreError::InvalidParameter(format!(
            "diffusion strength must be non-negative, got {d_si}"
        )));
    }
    let placeholder = QuadraticForm::zeros(modes.to_vec())?;
    let x0 = aligned_scales(&placeholder, scales)?;
    let dim = 2 * modes.len();
    let mut dmat = Array2::<f64>::zeros((dim, dim));
    for target in targets {
        let i = modes
            .iter()
            .position(|m| m == target)
            .ok_or_else(|| CoreError::Composition(format!("mode {target} not present")))?;
        dmat[(2 * i + 1, 2 * i + 1)] = d_si * x0[i] * x0[i] / (HBAR * HBAR);
    }
    Ok(dmat)
}

/// Active quasi-static noise dimensions of a spec (forces excluded — they
/// are integrated analytically on the Gaussian path and sampled explicitly
/// in the number-basis engine).
pub(crate) fn gap_tilt_dimensions(noise: &NoiseSpec) -> Vec<(f64, NoiseAxis)> {
    let mut dims = Vec::new();
    match noise.correlation {
        NoiseCorrelation::ShieldCorrelated => {
            if noise.delta_l > 0.0 {
                dims.push((noise.delta_l, NoiseAxis::ShieldGap));
            }
            if noise.delta_theta > 0.0 {
                dims.push((noise.delta_theta, NoiseAxis::ShieldTilt));
            }
        }
        NoiseCorrelation::DetectorUncorrelated => {
            if noise.delta_l > 0.0 {
                dims.push((noise.delta_l, NoiseAxis::GapA));
                dims.push((noise.delta_l, NoiseAxis::GapB));
            }
            if noise.delta_theta > 0.0 {
                dims.push((noise.delta_theta, NoiseAxis::TiltA));
                dims.push((noise.delta_theta, NoiseAxis::TiltB));
            }
        }
    }
    dims
}

#[derive(Debug, Clone, Copy)]
pub(crate) enum NoiseAxis {
    ShieldGap,
    ShieldTilt,
    GapA,
    GapB,
    TiltA,
    TiltB,
    ForceA,
    ForceB,
}

pub(crate) fn draw_from_coordinates(axes: &[(f64, NoiseAxis)], coords: &[f64]) -> NoiseDraw {
    let mut draw = NoiseDraw::zero();
    for ((_, axis), &value) in axes.iter().zip(coords) {
        match axis {
            NoiseAxis::ShieldGap => {
                draw.shift_a += value;
                draw.shift_b -= value;
            }
            NoiseAxis::ShieldTilt => {
                draw.tilt_a += value;
                draw.tilt_b += value;
            }
            NoiseAxis::GapA => draw.shift_a += value,
            NoiseAxis::GapB => draw.shift_b += value,
            NoiseAxis::TiltA => draw.tilt_a += value,
            NoiseAxis::TiltB => draw.tilt_b += value,
            NoiseAxis::ForceA => draw.force_a += value,
            NoiseAxis::ForceB => draw.force_b += value,
        }
    }
    draw
}

/// Particle delocalisation modes present in the form (the axes that
/// receive trap-force noise).
pub(crate) fn force_modes(modes: &[ModeLabel]) -> Vec<ModeLabel> {
    modes
        .iter()
        .copied()
        .filter(|m| matches!(m, ModeLabel::XA | ModeLabel::XB))
        .collect()
}

/// Evolve one noise realisation and return (d, σ) with the analytic
/// force-noise covariance already folded in.
fn evolve_node(
    builder: &dyn Fn(&NoiseDraw) -> Result<QuadraticForm>,
    scales: &[(ModeLabel, f64)],
    initial: &GaussianState,
    static_drive: &Array1<f64>,
    draw: &NoiseDraw,
    delta_force: f64,
    t: f64,
) -> Result<(Array1<f64>, Array2<f64>)> {
    let form = builder(draw)?;
    if form.modes != initial.modes {
        return Err(CoreError::Composition(
            "noise builder changed the mode list".into(),
        ));
    }
    let mut prop = Propagator::new(&form, scales)?;
    // Strip the static equilibrium shift: only the noise-induced part of
    // the drive displaces branches relative to one another.
    prop.drive = &prop.drive - static_drive;
    let (s, j) = prop.flow(t)?;
    let omega = prop.omega();
    let mean = s.dot(&initial.mean) + j.dot(&omega.dot(&prop.drive));
    let mut sigma = s.dot(&initial.sigma()).dot(&s.t());
    if delta_force > 0.0 {
        let jw = j.dot(&omega);
        for target in force_modes(&form.modes) {
            let i = form.modes.iter().position(|m| *m == target).unwrap();
            let x0 = scales
                .iter()
                .find(|(l, _)| *l == target)
                .map(|(_, v)| *v)
                .unwrap();
            let mut unit = Array1::<f64>::zeros(2 * form.modes.len());
            unit[2 * i] = delta_force * x0 / HBAR;
            let v = jw.dot(&unit);
            sigma = sigma + outer(&v, &v);
        }
    }
    Ok((mean, sigma))
}

/// Quasi-static ensemble average by tensor Gauss–Hermite quadrature.
///
/// `builder` maps a noise draw to the assembled SI form (same mode list
/// for every draw). The returned state carries ⟨d⟩ and ⟨V⟩, so its
/// [`GaussianState::sigma`] is the mixture covariance σ̄ = ⟨V⟩ − ⟨d⟩⟨d⟩ᵀ.
pub fn quasi_static_average(
    builder: &dyn Fn(&NoiseDraw) -> Result<QuadraticForm>,
    scales: &[(ModeLabel, f64)],
    initial: &GaussianState,
    noise: &NoiseSpec,
    t: f64,
    order: usize,
) -> Result<GaussianState> {
    noise.validate()?;
    let static_form = builder(&NoiseDraw::zero())?;
    let static_prop = Propagator::new(&static_form, scales)?;
    let static_drive = static_prop.drive.clone();

    let axes = gap_tilt_dimensions(noise);
    let sigmas: Vec<f64> = axes.iter().map(|(s, _)| *s).collect();
    let grid = tensor_gauss_hermite(&sigmas, order)?;

    let dim = 2 * initial.modes.len();
    let mut mean_acc = Array1::<f64>::zeros(dim);
    let mut second_acc = Array2::<f64>::zeros((dim, dim));
    for (coords, w) in grid.points.iter().zip(grid.weights.iter()) {
        let draw = draw_from_coordinates(&axes, coords);
        let (mean, sigma) = evolve_node(
            builder,
            scales,
            initial,
            &static_drive,
            &draw,
            noise.delta_force,
            t,
        )?;
        second_acc = second_acc + (&sigma + &outer(&mean, &mean)) * *w;
        mean_acc = mean_acc + &mean * *w;
    }
    Ok(GaussianState {
        modes: initial.modes.clone(),
        mean: mean_acc,
        second: second_acc,
    })
}

/// Monte-Carlo reference for [`quasi_static_average`]: every active
/// dimension — including the trap forces — is sampled explicitly.
pub fn quasi_static_monte_carlo(
    builder: &dyn Fn(&NoiseDraw) -> Result<QuadraticForm>,
    scales: &[(ModeLabel, f64)],
    initial: &GaussianState,
    noise: &NoiseSpec,
    t: f64,
    samples: usize,
    seed: u64,
) -> Result<GaussianState> {
    noise.validate()?;
    let static_form = builder(&NoiseDraw::zero())?;
    let static_prop = Propagator::new(&static_form, scales)?;
    let static_drive = static_prop.drive.clone();

    let mut axes = gap_tilt_dimensions(noise);
    if noise.delta_force > 0.0 {
        for m in force_modes(&initial.modes) {
            axes.push((
                noise.delta_force,
                if m == ModeLabel::XA {
                    NoiseAxis::ForceA
                } else {
                    NoiseAxis::ForceB
                },
            ));
        }
    }
    let sigmas: Vec<f64> = axes.iter().map(|(s, _)| *s).collect();

    let dim = 2 * initial.modes.len();
    let mut mean_acc = Array1::<f64>::zeros(dim);
    let mut second_acc = Array2::<f64>::zeros((dim, dim));
    let mut failure: Option<CoreError> = None;
    let _ = monte_carlo_gaussian(&sigmas, samples, seed, |coords| {
        if failure.is_some() {
            return 0.0;
        }
        let draw = draw_from_coordinates(&axes, coords);
        match evolve_node(builder, scales, initial, &static_drive, &draw, 0.0, t) {
            Ok((mean, sigma)) => {
                second_acc += &sigma;
                second_acc += &outer(&mean, &mean);
                mean_acc += &mean;
                0.0
            }
            Err(e) => {
                failure = Some(e);
                0.0
            }
        }
    });
    if let Some(e) = failure {
        return Err(e);
    }
    let n = samples as f64;
    Ok(GaussianState {
        modes: initial.modes.clone(),
        mean: mean_acc / n,
        second: second_acc / n,
    })
}

/// Fixed-step RK4 integration of σ̇ = Kσ + σKᵀ + 𝒟 — an independent
/// cross-check of the exact Van Loan path.
pub fn diffusion_rk4(
    k: &Array2<f64>,
    diffusion: &Array2<f64>,
    sigma0: &Array2<f64>,
    t: f64,
    steps: usize,
) -> Array2<f64> {
    let rhs = |sig: &Array2<f64>| -> Array2<f64> {
        k.dot(sig) + sig.dot(&k.t()) + diffusion
    };
    let h = t / steps as f64;
    let mut sigma = sigma0.clone();
    for _ in 0..steps {
        let k1 = rhs(&sigma);
        let k2 = rhs(&(&sigma + &(&k1 * (0.5 * h))));
        let k3 = rhs(&(&sigma + &(&k2 * (0.5 * h))));
        let k4 = rhs(&(&sigma + &(&k3 * h)));
        sigma = sigma + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
    }
    sigma
}

/// RK4 with Richardson step-halving until successive grids agree to
/// `tol` (max-entry), returning the finer solution.
pub fn diffusion_rk4_adaptive(
    k: &Array2<f64>,
    diffusion: &Array2<f64>,
    sigma0: &Array2<f64>,
    t: f64,
    tol: f64,
) -> Result<Array2<f64>> {
    let mut steps = 64usize;
    let mut coarse = diffusion_rk4(k, diffusion, sigma0, t, steps);
    for _ in 0..14 {
        steps *= 2;
        let fine = diffusion_rk4(k, diffusion, sigma0, t, steps);
        let defect = (&fine - &coarse)
            .iter()
            .fold(0.0f64, |a, v| a.max(v.abs()));
        if defect < tol {
            return Ok(fine);
        }
        coarse = fine;
    }
    Err(CoreError::Numeric(format!(
        "RK4 step-halving did not converge to {tol:.1e} within {steps} steps"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonians::{
        assemble, casimir_form, gravity_form, magdipole_form, trap_form, ParticleLabel,
    };
    use approx::assert_relative_eq;
    use std::f64::consts::{FRAC_PI_2, LN_2, PI};

    const LAMBDA_PB: f64 = 4.705865948853406e-18;
    const LAMBDA_SI: f64 = 2.569834708638791e-19;
    const ETA_PB: f64 = 2.075123495130121e-12;
    const DELTA_PB: f64 = 7.011476976869295e-9;
    const MASS_PB: f64 = 4.7500880922277685e-11;
    const MASS_SI: f64 = 1.1100294042683939e-11;
    const L: f64 = 20e-6;
    const D0: f64 = 9e-6;
    const D0M: f64 = 19e-6;
    const DELTA_X: f64 = 50e-9;
    const T0_SI: f64 = 0.164146248543525;
    const T0_PB: f64 = 0.00896389169144904;

    fn xa_xb() -> Vec<ModeLabel> {
        vec![ModeLabel::XA, ModeLabel::XB]
    }

    fn particle_scales() -> Vec<(ModeLabel, f64)> {
        vec![(ModeLabel::XA, DELTA_X), (ModeLabel::XB, DELTA_X)]
    }

    /// Gravity-only flow on the two delocalisation axes, free traps.
    fn gravity_only_builder(
        lambda: f64,
        mass: f64,
    ) -> impl Fn(&NoiseDraw) -> crate::error::Result<QuadraticForm> {
        move |draw: &NoiseDraw| {
            let grav = gravity_form(FRAC_PI_2, FRAC_PI_2, lambda, L)?;
            let ta = trap_form(ParticleLabel::A, 0.0, mass, &NoiseDraw::zero())?;
            let tb = trap_form(ParticleLabel::B, 0.0, mass, &NoiseDraw::zero())?;
            let _ = draw;
            assemble(&[grav, ta, tb])?.restrict(&[ModeLabel::XA, ModeLabel::XB])
        }
    }

    #[test]
    fn zero_time_is_the_identity() {
        let form = gravity_only_builder(LAMBDA_PB, MASS_PB)(&NoiseDraw::zero()).unwrap();
        let prop = Propagator::new(&form, &particle_scales()).unwrap();
        let state = GaussianState::prepared(xa_xb(), &[1.0, 1.0], &[0.0, 0.0]).unwrap();
        let out = prop.propagate(&state, 0.0).unwrap();
        let drift = (&out.second - &state.second)
            .iter()
            .fold(0.0f64, |a, v| a.max(v.abs()));
        assert!(drift < 1e-14);
        assert!(out.mean.iter().all(|v| v.abs() < 1e-14));
    }

    #[test]
    fn free_particle_spreads_ballistically() {
        let mass = MASS_PB;
        let form = assemble(&[
            trap_form(ParticleLabel::A, 0.0, mass, &NoiseDraw::zero()).unwrap(),
        ])
        .unwrap()
        .restrict(&[ModeLabel::XA])
        .unwrap();
        let scales = vec![(ModeLabel::XA, DELTA_X)];
        let prop = Propagator::new(&form, &scales).unwrap();
        let state =
            GaussianState::prepared(vec![ModeLabel::XA], &[1.0], &[0.0]).unwrap();
        // Var x(t) = Δx² + (t/M)²·Var p(0) with Var p(0) = ħ²/(4Δx²):
        // dimensionless Var X(t) = 1 + (ħ t / (2 M Δx²))².
        for t in [0.0, 0.3, 2.0, 15.0] {
            let out = prop.propagate(&state, t).unwrap();
            let expected = 1.0 + (HBAR * t / (2.0 * mass * DELTA_X * DELTA_X)).powi(2);
            assert_relative_eq!(out.sigma()[(0, 0)], expected, max_relative = 1e-10);
            assert_relative_eq!(out.purity().unwrap(), 1.0, max_relative = 1e-8);
            assert!(prop.symplectic_defect(t).unwrap() < 1e-9);
        }
    }

    #[test]
    fn harmonic_flow_revives_and_stays_symplectic() {
        // Trapped flows are integrated in oscillator units
        // x₀ = √(ħ/Mω), which keep the drift matrix balanced; the wide
        // prepared wavepacket then appears as a large dimensionless spread
        // Δ = Δx/x₀ in the initial covariance instead.
        let omega = 2.0 * PI * 100.0;
        let form = assemble(&[
            trap_form(ParticleLabel::A, omega, MASS_PB, &NoiseDraw::zero()).unwrap(),
        ])
        .unwrap()
        .restrict(&[ModeLabel::XA])
        .unwrap();
        let x_ho = (HBAR / (MASS_PB * omega)).sqrt();
        let scales = vec![(ModeLabel::XA, x_ho)];
        let prop = Propagator::new(&form, &scales).unwrap();
        let period = 2.0 * PI / omega;
        let (s, _) = prop.flow(period).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                let expected = if i == j { 1.0 } else { 0.0 };
                assert!(
                    (s[(i, j)] - expected).abs() < 1e-12,
                    "S(T) not the identity at ({i},{j}): {}",
                    s[(i, j)]
                );
            }
        }
        assert!(prop.symplectic_defect(0.37 * period).unwrap() < 1e-12);

        // The delocalised state breathes but returns after a full period
        // and stays pure throughout.
        let delta = DELTA_X / x_ho;
        let state =
            GaussianState::prepared(vec![ModeLabel::XA], &[delta], &[0.0]).unwrap();
        let out = prop.propagate(&state, period).unwrap();
        assert_relative_eq!(
            out.sigma()[(0, 0)],
            delta * delta,
            max_relative = 1e-10
        );
        assert_relative_eq!(out.purity().unwrap(), 1.0, max_relative = 1e-8);
    }

    #[test]
    fn gravity_entangles_at_the_published_rate() {
        // ω = 0 phase accumulation: the partially transposed spectrum is
        // ν̃_min = √(¼ + u²) − u with u = t/t₀ (t₀ = ħ/λΔx²), hence
        // E_N(t) = −log₂ 2ν̃ and a small-t rate 2/(t₀ ln 2).
        for (lambda, mass, t0, rate) in [
            (LAMBDA_SI, MASS_SI, T0_SI, 17.578166466672783),
            (LAMBDA_PB, MASS_PB, T0_PB, 321.8903330269372),
        ] {
            let builder = gravity_only_builder(lambda, mass);
            let form = builder(&NoiseDraw::zero()).unwrap();
            let prop = Propagator::new(&form, &particle_scales()).unwrap();
            let state = GaussianState::prepared(xa_xb(), &[1.0, 1.0], &[0.0, 0.0]).unwrap();

            assert_relative_eq!(
                HBAR / (lambda * DELTA_X * DELTA_X),
                t0,
                max_relative = 1e-12
            );
            for u in [0.03, 0.4, 1.0, 2.0] {
                let t = u * t0;
                let out = prop.propagate(&state, t).unwrap();
                let en = out.log_negativity(&[ModeLabel::XB]).unwrap();
                let nu = (0.25 + u * u).sqrt() - u;
                assert_relative_eq!(en, -(2.0 * nu).log2(), max_relative = 1e-7);
            }
            let t_small = 1e-5 * t0;
            let out = prop.propagate(&state, t_small).unwrap();
            let en = out.log_negativity(&[ModeLabel::XB]).unwrap();
            assert_relative_eq!(en / t_small, rate, max_relative = 1e-4);
        }
    }

    #[test]
    fn markovian_localization_has_a_sharp_threshold_at_hbar_lambda() {
        let builder = gravity_only_builder(LAMBDA_SI, MASS_SI);
        let form = builder(&NoiseDraw::zero()).unwrap();
        let scales = particle_scales();
        let prop = Propagator::new(&form, &scales).unwrap();
        let state = GaussianState::prepared(xa_xb(), &[1.0, 1.0], &[0.0, 0.0]).unwrap();
        let modes = xa_xb();

        // Exactly at threshold D = ħλ the negativity vanishes identically.
        let d_threshold = HBAR * LAMBDA_SI;
        let dmat = momentum_diffusion(&modes, &scales, &modes, d_threshold).unwrap();
        for frac in [0.05, 0.3, 0.7, 1.0, 2.0] {
            let out = prop
                .propagate_diffusive(&state, frac * T0_SI, &dmat)
                .unwrap();
            let en = out.log_negativity(&[ModeLabel::XB]).unwrap();
            assert!(en <= 1e-6, "E_N = {en:.3e} at u = {frac}");
        }

        // At half threshold: ν̃ = √(¼ + u² + u/2) − u, frozen value at 2t₀.
        let dmat_half = momentum_diffusion(&modes, &scales, &modes, 0.5 * d_threshold).unwrap();
        let out = prop
            .propagate_diffusive(&state, 2.0 * T0_SI, &dmat_half)
            .unwrap();
        let en = out.log_negativity(&[ModeLabel::XB]).unwrap();
        assert_relative_eq!(en, 0.7794825813564386, max_relative = 1e-7);

        // Grid agreement between the exact Van Loan integral and RK4 with
        // Richardson halving.
        let rk4 = diffusion_rk4_adaptive(
            &prop.drift,
            &dmat_half,
            &state.sigma(),
            2.0 * T0_SI,
            1e-12,
        )
        .unwrap();
        let exact = out.sigma();
        let defect = (&rk4 - &exact)
            .iter()
            .fold(0.0f64, |a, v| a.max(v.abs()));
        assert!(defect < 1e-9, "RK4 vs Van Loan defect {defect:.3e}");

        // Small-t growth rate at D = 0: E_N ≈ (2/ln2)·u with u = t/t₀.
        let out = prop.propagate(&state, 1e-6 * T0_SI).unwrap();
        let en = out.log_negativity(&[ModeLabel::XB]).unwrap();
        assert_relative_eq!(en / 1e-6, 2.0 / LN_2, max_relative = 1e-5);
        assert_relative_eq!(2.0 / LN_2, 2.8853900817779268, max_relative = 1e-15);
    }

    /// Full lead-pair scenario on the delocalisation axes: traps, gravity,
    /// Casimir and magnetic-dipole statics, with trap-force noise.
    fn lead_linear_builder(
        omega: f64,
    ) -> impl Fn(&NoiseDraw) -> crate::error::Result<QuadraticForm> {
        move |draw: &NoiseDraw| {
            let grav = gravity_form(FRAC_PI_2, FRAC_PI_2, LAMBDA_PB, L)?;
            let mut pieces = vec![grav];
            for p in [ParticleLabel::A, ParticleLabel::B] {
                pieces.push(casimir_form(p, FRAC_PI_2, ETA_PB, D0, draw)?);
                pieces.push(magdipole_form(p, FRAC_PI_2, DELTA_PB, D0M, draw)?);
                pieces.push(trap_form(p, omega, MASS_PB, draw)?);
            }
            assemble(&pieces)?.restrict(&[ModeLabel::XA, ModeLabel::XB])
        }
    }

    /// Oscillator-unit scales and matching wide-wavepacket initial state
    /// for a trapped two-particle run.
    fn trapped_setup(omega: f64) -> (Vec<(ModeLabel, f64)>, GaussianState) {
        let x_ho = (HBAR / (MASS_PB * omega)).sqrt();
        let scales = vec![(ModeLabel::XA, x_ho), (ModeLabel::XB, x_ho)];
        let delta = DELTA_X / x_ho;
        let state = GaussianState::prepared(xa_xb(), &[delta, delta], &[0.0, 0.0]).unwrap();
        (scales, state)
    }

    #[test]
    fn trap_force_noise_dephases_except_at_the_revival_times() {
        let omega = 2.0 * PI * 100.0;
        let builder = lead_linear_builder(omega);
        let (scales, state) = trapped_setup(omega);

        // Interaction curvature softens the trap:
        // ω′ = √(ω² − (λ + 12δ + 6η)/M).
        let omega_eff = (omega * omega
            - (LAMBDA_PB + 12.0 * DELTA_PB + 6.0 * ETA_PB) / MASS_PB)
            .sqrt();
        assert_relative_eq!(omega_eff, 626.9071911199301, max_relative = 1e-10);
        let window = PI / omega_eff;
        assert_relative_eq!(window, 5.0112563679123485e-3, max_relative = 1e-10);

        let delta_l = 2e-13;
        let noise = NoiseSpec {
            kind: NoiseKind::QuasiStatic,
            delta_l: 0.0,
            delta_theta: 0.0,
            delta_force: MASS_PB * omega * omega * delta_l,
            correlation: NoiseCorrelation::DetectorUncorrelated,
            diffusion: 0.0,
            correlation_time: f64::INFINITY,
        };

        // Noise-free reference at the first revival.
        let quiet = quasi_static_average(&builder, &scales, &state, &NoiseSpec::quiet(), window, 1)
            .unwrap();
        let en_quiet = quiet.log_negativity(&[ModeLabel::XB]).unwrap();
        assert!(en_quiet > 0.1, "expected visible entanglement, got {en_quiet:.3e}");

        // At the revival the displacement response vanishes: E_N survives.
        let revived =
            quasi_static_average(&builder, &scales, &state, &noise, window, 12).unwrap();
        let en_revived = revived.log_negativity(&[ModeLabel::XB]).unwrap();
        assert_relative_eq!(en_revived, en_quiet, max_relative = 1e-3);

        // Halfway between revivals the ensemble is fully dephased.
        let dead =
            quasi_static_average(&builder, &scales, &state, &noise, 0.5 * window, 12).unwrap();
        let en_dead = dead.log_negativity(&[ModeLabel::XB]).unwrap();
        assert!(en_dead < 1e-6, "expected dephasing, got E_N = {en_dead:.3e}");
    }

    #[test]
    fn gauss_hermite_averaging_is_stable_and_matches_monte_carlo() {
        let omega = 2.0 * PI * 100.0;
        let builder = lead_linear_builder(omega);
        let (scales, state) = trapped_setup(omega);
        let omega_eff = 626.9071911199301;

        // Partially dephased working point: gap noise through the Casimir
        // and magnetic channels (correlated shield draw).
        let noise = NoiseSpec {
            kind: NoiseKind::QuasiStatic,
            delta_l: 5e-10,
            delta_theta: 0.0,
            delta_force: 0.0,
            correlation: NoiseCorrelation::ShieldCorrelated,
            diffusion: 0.0,
            correlation_time: f64::INFINITY,
        };
        let t = PI / omega_eff;

        let en_of = |order: usize| -> f64 {
            quasi_static_average(&builder, &scales, &state, &noise, t, order)
                .unwrap()
                .log_negativity(&[ModeLabel::XB])
                .unwrap()
        };
        let quiet = quasi_static_average(&builder, &scales, &state, &NoiseSpec::quiet(), t, 1)
            .unwrap()
            .log_negativity(&[ModeLabel::XB])
            .unwrap();
        let en20 = en_of(20);
        let en40 = en_of(40);
        assert!(
            (en20 - en40).abs() < 1e-6,
            "quadrature not converged: {en20} vs {en40}"
        );
        assert!(
            en20 < quiet,
            "gap noise should reduce entanglement: {en20} vs quiet {quiet}"
        );

        let mc = quasi_static_monte_carlo(&builder, &scales, &state, &noise, t, 4000, 0xC0FFEE)
            .unwrap()
            .log_negativity(&[ModeLabel::XB])
            .unwrap();
        assert!(
            (mc - en20).abs() < 0.05 * en20.abs().max(0.05),
            "Monte Carlo {mc} vs quadrature {en20}"
        );

        // The mixture must remain a physical state.
        quasi_static_average(&builder, &scales, &state, &noise, t, 20)
            .unwrap()
            .check_physical()
            .unwrap();
    }

    #[test]
    fn partial_trace_and_mode_bookkeeping() {
        let state = GaussianState::prepared(
            vec![ModeLabel::XA, ModeLabel::XB, ModeLabel::Shield { k: 1, l: 0 }],
            &[1.0, 1.0, std::f64::consts::FRAC_1_SQRT_2],
            &[0.0, 0.0, 3.0],
        )
        .unwrap();
        let reduced = state.trace_out_to(&[ModeLabel::XA, ModeLabel::XB]).unwrap();
        assert_eq!(reduced.n_modes(), 2);
        assert_eq!(reduced.log_negativity(&[ModeLabel::XB]).unwrap(), 0.0);
        assert!(state.trace_out_to(&[ModeLabel::YA]).is_err());
        assert!(state.log_negativity(&[ModeLabel::YB]).is_err());

        // Thermal membrane mode: Var(Q) = (1 + 2n̄)/2.
        let sq = state.sigma()[(4, 4)];
        assert_relative_eq!(sq, 0.5 * (1.0 + 2.0 * 3.0), max_relative = 1e-12);
    }
}
