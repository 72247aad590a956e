//! Continuous cat states in a truncated number basis.
//!
//! The delocalised states interpolating between a single Gaussian wave packet
//! and a two-branch cat are superpositions of two displaced squeezed packets,
//!
//! ψ ∝ D(α) S(r) |0⟩ + D(−α) S(r) |0⟩,   r = −ln(σ/x₀),   α = d/(4x₀),
//!
//! with branch centres ±d/2 and branch width σ, expressed through the length
//! scale x₀ of the basis, x̂ = x₀(â + â†) and p̂ = (ħ/2x₀)·i(â† − â). The
//! pair (σ, d) is tied to the prepared delocalisation by the variance
//! identity
//!
//! (Δx)² = σ² + d²/(4(1 + S)),   S = ⟨ψ₋|ψ₊⟩ = exp(−d²/8σ²),
//!
//! solved for σ by [`variance_match`]: d = 0 reduces to one Gaussian of width
//! Δx, and d → 2Δx approaches the two-branch limit of [`crate::cat`].
//!
//! Dynamics: a [`QuadraticForm`] (SI units) becomes a real symmetric matrix
//! on the product number basis — position couplings, diagonal kinetic terms
//! and position drives only — and each quasi-static noise node is evolved
//! exactly through one dense eigendecomposition, ψ(t) = V e^{−iEt/ħ} Vᵀψ(0).
//! Gauss–Hermite weights average the per-node projectors into a density
//! matrix; logarithmic negativity comes from the Schmidt spectrum on pure
//! runs ([`log_negativity_pure`]) or from the trace norm of the partial
//! transpose on averaged runs ([`log_negativity_density`]).
//!
//! The scale x₀ is a free numerical choice: observables are x₀-invariant
//! while the truncation level needed for a given tail budget is not. x₀ = Δx
//! is optimal at the Gaussian end; strongly split cats are cheapest near the
//! geometric mean √(Δx·σ) ([`balanced_scale`]), which reduces to Δx at d = 0.

use std::collections::BTreeSet;

use ndarray::linalg::kron;
use ndarray::{s, Array1, Array2};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::constants::HBAR;
use crate::error::{CoreError, Result};
use crate::gaussian::{self, NoiseKind, NoiseSpec};
use crate::hamiltonians::{ModeLabel, NoiseDraw, QuadraticForm};
use crate::linalg;
use crate::quadrature::tensor_gauss_hermite;

/// Fractional population allowed in the top eighth of each mode's basis.
pub const TAIL_BUDGET: f64 = 1e-8;

/// Hard cap on the product Hilbert-space dimension (cost guard).
pub const MAX_PRODUCT_DIM: usize = 40_000;

/// Minimum truncation per mode.
pub const MIN_LEVELS: usize = 8;

/// Truncated-basis layout: which modes are carried, how many number states
/// per mode, and the length scale x₀ shared by all modes.
#[derive(Debug, Clone, PartialEq)]
pub struct FockSpec {
    pub modes: Vec<ModeLabel>,
    pub levels: usize,
    pub x0: f64,
}

impl FockSpec {
    pub fn new(modes: Vec<ModeLabel>, levels: usize, x0: f64) -> Result<Self> {
        if modes.is_empty() {
            return Err(CoreError::Composition(
                "a Fock spec needs at least one mode".into(),
            ));
        }
        let unique: BTreeSet<_> = modes.iter().collect();
        if unique.len() != modes.len() {
            return Err(CoreError::Composition(format!(
                "duplicate mode labels in {modes:?}"
            )));
        }
        if levels < MIN_LEVELS {
            return Err(CoreError::InvalidParameter(format!(
                "the number basis needs at least {MIN_LEVELS} levels per mode, got {levels}"
            )));
        }
        if !(x0 > 0.0 && x0.is_finite()) {
            return Err(CoreError::InvalidParameter(format!(
                "basis length scale must be positive and finite, got {x0}"
            )));
        }
        let dim = levels
            .checked_pow(modes.len() as u32)
            .filter(|d| *d <= MAX_PRODUCT_DIM)
            .ok_or_else(|| {
                CoreError::InvalidParameter(format!(
                    "product dimension {levels}^{} exceeds the {MAX_PRODUCT_DIM} cost guard",
                    modes.len()
                ))
            })?;
        let _ = dim;
        Ok(Self { modes, levels, x0 })
    }

    /// Product Hilbert-space dimension.
    pub fn dim(&self) -> usize {
        self.levels.pow(self.modes.len() as u32)
    }
}

/// One continuous cat: prepared delocalisation Δx, branch separation d and
/// the matched branch width σ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContinuousCatParams {
    /// Target position spread Δx in m (√⟨x̂²⟩ of the full state).
    pub delta_x: f64,
    /// Branch-centre separation d in m.
    pub separation: f64,
    /// Branch width σ in m, solving the variance identity.
    pub sigma: f64,
}

impl ContinuousCatParams {
    /// Solve the variance identity for σ and package the triple.
    pub fn from_delta_x(delta_x: f64, separation: f64) -> Result<Self> {
        let sigma = variance_match(delta_x, separation)?;
        let params = Self {
            delta_x,
            separation,
            sigma,
        };
        let residual = params.variance_residual().abs();
        if residual > 1e-10 {
            return Err(CoreError::Numeric(format!(
                "variance identity residual {residual:.3e} after width matching"
            )));
        }
        Ok(params)
    }

    /// Branch overlap S = ⟨ψ₋|ψ₊⟩ = exp(−d²/8σ²).
    pub fn overlap(&self) -> f64 {
        (-self.separation * self.separation / (8.0 * self.sigma * self.sigma)).exp()
    }

    /// Relative defect (σ² + d²/(4(1+S)) − Δx²) / Δx².
    pub fn variance_residual(&self) -> f64 {
        let s = self.overlap();
        let var = self.sigma * self.sigma
            + self.separation * self.separation / (4.0 * (1.0 + s));
        (var - self.delta_x * self.delta_x) / (self.delta_x * self.delta_x)
    }
}

/// Geometric-mean length scale √(Δx·σ).
///
/// Splitting the cat shrinks σ below Δx; a basis scaled to either extreme
/// pays for it in squeezing (x₀ = Δx) or displacement (x₀ = σ) occupation.
/// The geometric mean balances the two burdens and minimises the truncation
/// level for a given tail budget; it reduces to Δx at d = 0.
pub fn balanced_scale(params: &ContinuousCatParams) -> f64 {
    (params.delta_x * params.sigma).sqrt()
}

/// Solve (Δx)² = σ² + d²/(4(1+S(σ,d))) for the branch width σ.
///
/// The right-hand side grows strictly with σ (S only enters through the
/// positive overlap correction), so bisection on (0, Δx] converges
/// unconditionally; the bracket is tightened to 10⁻¹³ relative.
pub fn variance_match(delta_x: f64, separation: f64) -> Result<f64> {
    if !(delta_x > 0.0 && delta_x.is_finite()) {
        return Err(CoreError::InvalidParameter(format!(
            "delocalisation Δx must be positive and finite, got {delta_x}"
        )));
    }
    if !(separation >= 0.0 && separation.is_finite()) {
        return Err(CoreError::InvalidParameter(format!(
            "branch separation must be non-negative and finite, got {separation}"
        )));
    }
    if separation >= 2.0 * delta_x {
        return Err(CoreError::InvalidParameter(format!(
            "no branch width satisfies the variance identity: separation {separation:.6e} m \
             must stay below 2Δx = {:.6e} m",
            2.0 * delta_x
        )));
    }
    if separation == 0.0 {
        return Ok(delta_x);
    }
    let residual = |sigma: f64| -> f64 {
        let s = (-separation * separation / (8.0 * sigma * sigma)).exp();
        sigma * sigma + separation * separation / (4.0 * (1.0 + s))
            - delta_x * delta_x
    };
    // σ → 0⁺ leaves d²/4 < Δx²; σ = Δx overshoots through the σ² term alone.
    let mut lo = 0.0f64;
    let mut hi = delta_x;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if residual(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= 1e-13 * hi {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Lowering operator â on `n` levels: â|k⟩ = √k·|k−1⟩.
fn lowering(n: usize) -> Array2<f64> {
    let mut a = Array2::<f64>::zeros((n, n));
    for k in 1..n {
        a[(k - 1, k)] = (k as f64).sqrt();
    }
    a
}

/// Position stencil (â + â†) = x̂/x₀.
fn position_stencil(n: usize) -> Array2<f64> {
    let a = lowering(n);
    &a + &a.t()
}

/// Antisymmetric stencil (â† − â); p̂ = (ħ/2x₀)·i·(â† − â).
fn momentum_stencil(n: usize) -> Array2<f64> {
    let a = lowering(n);
    &a.t() - &a
}

/// Friendly truncation suggestion after a tail-budget failure.
fn suggested_levels(n: usize) -> usize {
    (3 * n / 2).next_multiple_of(8)
}

/// Build the normalised cat vector ψ ∝ D(α)S(r)|0⟩ + D(−α)S(r)|0⟩ on
/// `spec.levels` number states at scale `spec.x0`.
///
/// The second branch is the parity image of the first (ΠD(α)Π = D(−α) and
/// [Π, S(r)] = 0), so odd components cancel exactly. The constructed state
/// must keep its top-eighth population under [`TAIL_BUDGET`] and reproduce
/// the prepared Δx to 10⁻⁶ relative, else a truncation error suggests a
/// larger basis.
pub fn build_cat_state(
    params: &ContinuousCatParams,
    spec: &FockSpec,
) -> Result<Array1<Complex64>> {
    let n = spec.levels;
    let x0 = spec.x0;
    let r = -(params.sigma / x0).ln();
    let alpha = params.separation / (4.0 * x0);

    let a = lowering(n);
    let squeeze_gen = (a.dot(&a) - a.t().dot(&a.t())) * (0.5 * r);
    let disp_gen = (&a.t() - &a) * alpha;
    let squeezed = linalg::expm(&squeeze_gen)?.column(0).to_owned();
    let plus = linalg::expm(&disp_gen)?.dot(&squeezed);

    let mut psi = Array1::<f64>::zeros(n);
    for k in 0..n {
        let mirror = if k % 2 == 0 { plus[k] } else { -plus[k] };
        psi[k] = plus[k] + mirror;
    }
    let norm = psi.dot(&psi).sqrt();
    if !(norm > 0.0 && norm.is_finite()) {
        return Err(CoreError::Numeric(format!(
            "cat construction produced norm {norm}"
        )));
    }
    psi /= norm;

    let tail_len = n.div_ceil(8);
    let tail: f64 = psi.slice(s![n - tail_len..]).iter().map(|v| v * v).sum();
    if tail > TAIL_BUDGET {
        return Err(CoreError::Truncation {
            tail,
            suggested: suggested_levels(n),
        });
    }

    // Moment audit: the truncated, renormalised state must still carry the
    // prepared spread.
    let xpsi = position_stencil(n).dot(&psi);
    let spread = x0 * xpsi.dot(&xpsi).sqrt();
    if (spread - params.delta_x).abs() > 1e-6 * params.delta_x {
        return Err(CoreError::Truncation {
            tail,
            suggested: suggested_levels(n),
        });
    }

    Ok(psi.mapv(|v| Complex64::new(v, 0.0)))
}

/// Smallest power-of-two-friendly truncation (8, 12, 16, 24, 32, …) whose
/// constructed cat passes the tail budget at scale `x0`.
pub fn default_levels(params: &ContinuousCatParams, x0: f64) -> Result<usize> {
    const LADDER: [usize; 11] = [8, 12, 16, 24, 32, 48, 64, 96, 128, 192, 256];
    let mut last_err: Option<CoreError> = None;
    for &n in &LADDER {
        let spec = FockSpec::new(vec![ModeLabel::XA], n, x0)?;
        match build_cat_state(params, &spec) {
            Ok(_) => return Ok(n),
            Err(e @ CoreError::Truncation { .. }) => last_err = Some(e),
            Err(e) => return Err(e),
        }
    }
    Err(last_err.unwrap_or_else(|| {
        CoreError::Numeric("truncation ladder exhausted without an error".into())
    }))
}

/// Kronecker product of per-mode vectors, leftmost factor most significant
/// (matching the operator embedding of [`hamiltonian_matrix`]).
pub fn product_state(factors: &[Array1<Complex64>]) -> Result<Array1<Complex64>> {
    if factors.is_empty() {
        return Err(CoreError::Composition(
            "product state needs at least one factor".into(),
        ));
    }
    let mut out = Array1::from_vec(vec![Complex64::new(1.0, 0.0)]);
    for f in factors {
        let mut next = Array1::<Complex64>::zeros(out.len() * f.len());
        for (i, &a) in out.iter().enumerate() {
            for (j, &b) in f.iter().enumerate() {
                next[i * f.len() + j] = a * b;
            }
        }
        out = next;
    }
    Ok(out)
}

/// Embed per-mode factors (identity where `None`) into the product basis.
fn embed(factors: &[Option<&Array2<f64>>], n: usize) -> Array2<f64> {
    let eye = Array2::<f64>::eye(n);
    let mut out: Option<Array2<f64>> = None;
    for f in factors {
        let factor = f.unwrap_or(&eye);
        out = Some(match out {
            None => factor.clone(),
            Some(acc) => kron(&acc, factor),
        });
    }
    out.unwrap_or_else(|| Array2::eye(1))
}

/// Matrix of Ĥ = ½ r̂ᵀG r̂ + gᵀr̂ + offset on the product number basis.
///
/// Representable terms: x̂², x̂ᵢx̂ⱼ, p̂² (and p̂ᵢp̂ⱼ), position drives and the
/// scalar offset — everything the gap, gravity and trap forms produce. Terms
/// mixing x̂ and p̂ or driving p̂ linearly would need a complex Hermitian
/// basis and are rejected.
pub fn hamiltonian_matrix(form: &QuadraticForm, spec: &FockSpec) -> Result<Array2<f64>> {
    if form.modes != spec.modes {
        return Err(CoreError::Composition(format!(
            "form modes {:?} do not match the Fock spec modes {:?}; embed or restrict first",
            form.modes, spec.modes
        )));
    }
    let m = spec.modes.len();
    let n = spec.levels;
    let dim = spec.dim();
    let x0 = spec.x0;
    let pscale = HBAR / (2.0 * x0);

    let geff = (&form.g_matrix + &form.g_matrix.t()) * 0.5;
    for i in 0..2 * m {
        for j in 0..2 * m {
            let crossed = (i % 2 == 0) != (j % 2 == 0);
            if crossed && geff[(i, j)] != 0.0 {
                return Err(CoreError::Composition(format!(
                    "form couples {} of mode {} to {} of mode {}: x̂–p̂ cross terms are \
                     outside the real symmetric number-basis engine",
                    if i % 2 == 0 { "x̂" } else { "p̂" },
                    form.modes[i / 2],
                    if j % 2 == 0 { "x̂" } else { "p̂" },
                    form.modes[j / 2],
                )));
            }
        }
    }
    for k in 0..m {
        if form.linear[2 * k + 1] != 0.0 {
            return Err(CoreError::Composition(format!(
                "form drives p̂ of mode {} linearly: not representable in the real \
                 symmetric number-basis engine",
                form.modes[k]
            )));
        }
    }

    let xq = position_stencil(n);
    let kq = momentum_stencil(n);
    let xx = xq.dot(&xq);
    let pp = -kq.dot(&kq);

    let mut h = Array2::<f64>::zeros((dim, dim));
    let mut factors: Vec<Option<&Array2<f64>>> = vec![None; m];
    for k in 0..m {
        let cxx = 0.5 * geff[(2 * k, 2 * k)] * x0 * x0;
        if cxx != 0.0 {
            factors[k] = Some(&xx);
            h.scaled_add(cxx, &embed(&factors, n));
            factors[k] = None;
        }
        let cpp = 0.5 * geff[(2 * k + 1, 2 * k + 1)] * pscale * pscale;
        if cpp != 0.0 {
            factors[k] = Some(&pp);
            h.scaled_add(cpp, &embed(&factors, n));
            factors[k] = None;
        }
        let clin = form.linear[2 * k] * x0;
        if clin != 0.0 {
            factors[k] = Some(&xq);
            h.scaled_add(clin, &embed(&factors, n));
            factors[k] = None;
        }
    }
    for k in 0..m {
        for l in k + 1..m {
            let cxx = geff[(2 * k, 2 * l)] * x0 * x0;
            if cxx != 0.0 {
                factors[k] = Some(&xq);
                factors[l] = Some(&xq);
                h.scaled_add(cxx, &embed(&factors, n));
                factors[k] = None;
                factors[l] = None;
            }
            // p̂ₖp̂ₗ = (i·pscale)²·KₖKₗ picks up one minus sign.
            let cpp = -geff[(2 * k + 1, 2 * l + 1)] * pscale * pscale;
            if cpp != 0.0 {
                factors[k] = Some(&kq);
                factors[l] = Some(&kq);
                h.scaled_add(cpp, &embed(&factors, n));
                factors[k] = None;
                factors[l] = None;
            }
        }
    }
    if form.offset != 0.0 {
        for i in 0..dim {
            h[(i, i)] += form.offset;
        }
    }

    let mut scale = 0.0f64;
    let mut defect = 0.0f64;
    for i in 0..dim {
        for j in i..dim {
            scale = scale.max(h[(i, j)].abs());
            defect = defect.max((h[(i, j)] - h[(j, i)]).abs());
        }
    }
    if defect > 1e-10 * scale.max(f64::MIN_POSITIVE) {
        return Err(CoreError::Numeric(format!(
            "number-basis Hamiltonian has Hermiticity defect {defect:.3e} \
             against scale {scale:.3e}"
        )));
    }
    for i in 0..dim {
        for j in i + 1..dim {
            let sym = 0.5 * (h[(i, j)] + h[(j, i)]);
            h[(i, j)] = sym;
            h[(j, i)] = sym;
        }
    }
    Ok(h)
}

/// Exact propagator on the truncated basis: one dense eigendecomposition of
/// the (time-independent) node Hamiltonian, then ψ(t) = V e^{−iEt/ħ} Vᵀψ(0)
/// for any number of times.
#[derive(Debug, Clone)]
pub struct FockPropagator {
    pub modes: Vec<ModeLabel>,
    pub levels: usize,
    evals: Array1<f64>,
    evecs: Array2<f64>,
}

impl FockPropagator {
    pub fn new(form: &QuadraticForm, spec: &FockSpec) -> Result<Self> {
        let h = hamiltonian_matrix(form, spec)?;
        let (evals, evecs) = linalg::eigh(&h)?;
        Ok(Self {
            modes: spec.modes.clone(),
            levels: spec.levels,
            evals,
            evecs,
        })
    }

    pub fn dim(&self) -> usize {
        self.levels.pow(self.modes.len() as u32)
    }

    pub fn evolve(&self, psi0: &Array1<Complex64>, t: f64) -> Result<Array1<Complex64>> {
        let dim = self.dim();
        if psi0.len() != dim {
            return Err(CoreError::Composition(format!(
                "state length {} does not match the basis dimension {dim}",
                psi0.len()
            )));
        }
        if !t.is_finite() {
            return Err(CoreError::InvalidParameter(format!(
                "evolution time must be finite, got {t}"
            )));
        }
        // The eigenbasis is real, so the complex rotation splits into four
        // real mat-vecs around the diagonal phases.
        let re = psi0.mapv(|c| c.re);
        let im = psi0.mapv(|c| c.im);
        let cre = self.evecs.t().dot(&re);
        let cim = self.evecs.t().dot(&im);
        let mut rre = Array1::<f64>::zeros(dim);
        let mut rim = Array1::<f64>::zeros(dim);
        for k in 0..dim {
            let theta = -self.evals[k] * t / HBAR;
            let (sin, cos) = theta.sin_cos();
            rre[k] = cre[k] * cos - cim[k] * sin;
            rim[k] = cre[k] * sin + cim[k] * cos;
        }
        let out_re = self.evecs.dot(&rre);
        let out_im = self.evecs.dot(&rim);
        Ok(Array1::from_iter(
            out_re
                .iter()
                .zip(out_im.iter())
                .map(|(&a, &b)| Complex64::new(a, b)),
        ))
    }
}

/// Quasi-static noise axes for the number-basis engine: the shared gap/tilt
/// axes of the Gaussian engine plus explicit per-particle force axes (the
/// Gaussian path integrates forces analytically; here they are sampled).
fn noise_axes(noise: &NoiseSpec, modes: &[ModeLabel]) -> Vec<(f64, gaussian::NoiseAxis)> {
    let mut axes = gaussian::gap_tilt_dimensions(noise);
    if noise.delta_force > 0.0 {
        for m in gaussian::force_modes(modes) {
            axes.push((
                noise.delta_force,
                if m == ModeLabel::XA {
                    gaussian::NoiseAxis::ForceA
                } else {
                    gaussian::NoiseAxis::ForceB
                },
            ));
        }
    }
    axes
}

fn check_quasi_static(noise: &NoiseSpec) -> Result<()> {
    noise.validate()?;
    if noise.kind != NoiseKind::QuasiStatic || noise.diffusion > 0.0 {
        return Err(CoreError::InvalidParameter(
            "the number-basis engine averages quasi-static noise only; Markovian \
             diffusion belongs to the covariance-matrix engine"
                .into(),
        ));
    }
    Ok(())
}

/// Shared static-configuration data for ensemble averaging.
struct EnsembleSetup {
    static_linear: Array1<f64>,
    static_offset: f64,
    axes: Vec<(f64, gaussian::NoiseAxis)>,
}

fn ensemble_setup(
    initial: &Array1<Complex64>,
    builder: &dyn Fn(&NoiseDraw) -> Result<QuadraticForm>,
    noise: &NoiseSpec,
    spec: &FockSpec,
) -> Result<EnsembleSetup> {
    check_quasi_static(noise)?;
    let static_form = builder(&NoiseDraw::zero())?;
    if static_form.modes != spec.modes {
        return Err(CoreError::Composition(format!(
            "noise builder produced modes {:?}, the Fock spec carries {:?}",
            static_form.modes, spec.modes
        )));
    }
    if initial.len() != spec.dim() {
        return Err(CoreError::Composition(format!(
            "initial state length {} does not match the basis dimension {}",
            initial.len(),
            spec.dim()
        )));
    }
    let norm0: f64 = initial.iter().map(|c| c.norm_sqr()).sum();
    if (norm0 - 1.0).abs() > 1e-8 {
        return Err(CoreError::NonPhysicalState(format!(
            "initial state norm² = {norm0}, expected 1"
        )));
    }
    Ok(EnsembleSetup {
        static_linear: static_form.linear.clone(),
        static_offset: static_form.offset,
        axes: noise_axes(noise, &spec.modes),
    })
}

/// Evolve one noise realisation. The static drive and offset are stripped:
/// only the noise-induced part of the drive displaces branches relative to
/// one another (the equilibrium shift belongs to state preparation), and the
/// constant energy is a global phase.
fn node_state(
    builder: &dyn Fn(&NoiseDraw) -> Result<QuadraticForm>,
    setup: &EnsembleSetup,
    spec: &FockSpec,
    initial: &Array1<Complex64>,
    draw: &NoiseDraw,
    t: f64,
) -> Result<Array1<Complex64>> {
    let mut form = builder(draw)?;
    if form.modes != spec.modes {
        return Err(CoreError::Composition(
            "noise builder changed the mode list".into(),
        ));
    }
    form.linear = &form.linear - &setup.static_linear;
    form.offset -= setup.static_offset;
    let prop = FockPropagator::new(&form, spec)?;
    let psi = prop.evolve(initial, t)?;
    let norm: f64 = psi.iter().map(|c| c.norm_sqr()).sum();
    if (norm - 1.0).abs() > 1e-9 {
        return Err(CoreError::Numeric(format!(
            "per-node unitarity violated: norm² drifted to {norm}"
        )));
    }
    Ok(psi)
}

/// Accumulate ρ̄ += Σ w·ψψ† in a deterministic order.
fn accumulate_projectors(
    states: &[(f64, Array1<Complex64>)],
    dim: usize,
) -> Array2<Complex64> {
    let mut rho = Array2::<Complex64>::zeros((dim, dim));
    for (w, psi) in states {
        for i in 0..dim {
            let a = psi[i] * *w;
            for j in 0..dim {
                rho[(i, j)] += a * psi[j].conj();
            }
        }
    }
    rho
}

/// Trace the shield modes out of a full-basis density matrix, keeping the
/// particle modes in their original order. A no-op when no shield is carried.
fn reduce_to_particles(
    rho: Array2<Complex64>,
    spec: &FockSpec,
) -> Result<Array2<Complex64>> {
    let keep: Vec<usize> = spec
        .modes
        .iter()
        .enumerate()
        .filter(|(_, m)| !matches!(m, ModeLabel::Shield { .. }))
        .map(|(i, _)| i)
        .collect();
    if keep.len() == spec.modes.len() {
        return Ok(rho);
    }
    let dims = vec![spec.levels; spec.modes.len()];
    partial_trace(&rho, &dims, &keep)
}

/// Quasi-static ensemble average by tensor Gauss–Hermite quadrature:
/// per-node exact evolution, weighted projector sum, shield modes traced
/// out. Nodes evolve in parallel; the reduction order is deterministic.
pub fn evolve_average(
    initial: &Array1<Complex64>,
    builder: &(dyn Fn(&NoiseDraw) -> Result<QuadraticForm> + Sync),
    noise: &NoiseSpec,
    t: f64,
    spec: &FockSpec,
    order: usize,
) -> Result<Array2<Complex64>> {
    let setup = ensemble_setup(initial, builder, noise, spec)?;
    let sigmas: Vec<f64> = setup.axes.iter().map(|(s, _)| *s).collect();
    let grid = tensor_gauss_hermite(&sigmas, order)?;
    let states: Vec<(f64, Array1<Complex64>)> = grid
        .points
        .par_iter()
        .zip(grid.weights.par_iter())
        .map(|(coords, w)| {
            let draw = gaussian::draw_from_coordinates(&setup.axes, coords);
            Ok((*w, node_state(builder, &setup, spec, initial, &draw, t)?))
        })
        .collect::<Result<_>>()?;
    let rho = accumulate_projectors(&states, spec.dim());
    reduce_to_particles(rho, spec)
}

/// Monte-Carlo reference for [`evolve_average`]: the same axes are sampled
/// explicitly in antithetic pairs ±ξ (unbiased, and the pairing cancels the
/// odd-order sampling noise of the phase factors). ChaCha seeding keeps the
/// result reproducible.
pub fn evolve_monte_carlo(
    initial: &Array1<Complex64>,
    builder: &(dyn Fn(&NoiseDraw) -> Result<QuadraticForm> + Sync),
    noise: &NoiseSpec,
    t: f64,
    spec: &FockSpec,
    pairs: usize,
    seed: u64,
) -> Result<Array2<Complex64>> {
    if pairs == 0 {
        return Err(CoreError::InvalidParameter(
            "Monte-Carlo averaging needs at least one sample pair".into(),
        ));
    }
    let setup = ensemble_setup(initial, builder, noise, spec)?;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let weight = 0.5 / pairs as f64;
    let mut draws: Vec<NoiseDraw> = Vec::with_capacity(2 * pairs);
    for _ in 0..pairs {
        let coords: Vec<f64> = setup
            .axes
            .iter()
            .map(|(sigma, _)| {
                let z: f64 = StandardNormal.sample(&mut rng);
                sigma * z
            })
            .collect();
        let mirrored: Vec<f64> = coords.iter().map(|c| -c).collect();
        draws.push(gaussian::draw_from_coordinates(&setup.axes, &coords));
        draws.push(gaussian::draw_from_coordinates(&setup.axes, &mirrored));
    }
    let states: Vec<(f64, Array1<Complex64>)> = draws
        .par_iter()
        .map(|draw| Ok((weight, node_state(builder, &setup, spec, initial, draw, t)?)))
        .collect::<Result<_>>()?;
    let rho = accumulate_projectors(&states, spec.dim());
    reduce_to_particles(rho, spec)
}

/// Partial trace of a density matrix over the complement of `keep`.
///
/// `dims` lists the per-factor dimensions (leftmost most significant, the
/// layout of [`product_state`]); `keep` holds strictly increasing factor
/// indices that survive, in their original order.
pub fn partial_trace(
    rho: &Array2<Complex64>,
    dims: &[usize],
    keep: &[usize],
) -> Result<Array2<Complex64>> {
    let total: usize = dims.iter().product();
    if dims.is_empty() || dims.contains(&0) {
        return Err(CoreError::Composition(
            "partial trace needs non-empty factor dimensions".into(),
        ));
    }
    if rho.nrows() != total || rho.ncols() != total {
        return Err(CoreError::Composition(format!(
            "density matrix is {}×{}, factors multiply to {total}",
            rho.nrows(),
            rho.ncols()
        )));
    }
    if keep.is_empty()
        || keep.windows(2).any(|w| w[0] >= w[1])
        || keep.iter().any(|k| *k >= dims.len())
    {
        return Err(CoreError::Composition(format!(
            "kept factors {keep:?} must be strictly increasing indices into {} factors",
            dims.len()
        )));
    }

    let mut strides = vec![1usize; dims.len()];
    for i in (0..dims.len() - 1).rev() {
        strides[i] = strides[i + 1] * dims[i + 1];
    }
    let traced: Vec<usize> = (0..dims.len()).filter(|i| !keep.contains(i)).collect();
    let keep_dim: usize = keep.iter().map(|&k| dims[k]).product();
    let trace_dim: usize = traced.iter().map(|&k| dims[k]).product();

    // Offset of a compound index in the full basis.
    let offset = |compound: usize, factors: &[usize]| -> usize {
        let mut rest = compound;
        let mut off = 0usize;
        for &f in factors.iter().rev() {
            off += (rest % dims[f]) * strides[f];
            rest /= dims[f];
        }
        off
    };

    let mut out = Array2::<Complex64>::zeros((keep_dim, keep_dim));
    for ki in 0..keep_dim {
        let oi = offset(ki, keep);
        for kj in 0..keep_dim {
            let oj = offset(kj, keep);
            let mut sum = Complex64::new(0.0, 0.0);
            for tr in 0..trace_dim {
                let ot = offset(tr, &traced);
                sum += rho[(oi + ot, oj + ot)];
            }
            out[(ki, kj)] = sum;
        }
    }
    Ok(out)
}

/// Logarithmic negativity of a pure bipartite vector via its Schmidt
/// spectrum: E_N = 2·log₂ Σₖ sₖ with sₖ the singular values of the (n_A×n_B)
/// reshaping.
pub fn log_negativity_pure(psi: &Array1<Complex64>, dims: (usize, usize)) -> Result<f64> {
    let (na, nb) = dims;
    if na * nb != psi.len() {
        return Err(CoreError::Composition(format!(
            "state length {} does not factor as {na}×{nb}",
            psi.len()
        )));
    }
    let norm: f64 = psi.iter().map(|c| c.norm_sqr()).sum();
    if (norm - 1.0).abs() > 1e-8 {
        return Err(CoreError::NonPhysicalState(format!(
            "pure-state norm² = {norm}, expected 1"
        )));
    }
    // Schmidt values via the B-side Gram matrix of the reshaped vector.
    let mut gram = Array2::<Complex64>::zeros((nb, nb));
    for j1 in 0..nb {
        for j2 in j1..nb {
            let mut acc = Complex64::new(0.0, 0.0);
            for i in 0..na {
                acc += psi[i * nb + j1].conj() * psi[i * nb + j2];
            }
            gram[(j1, j2)] = acc;
            gram[(j2, j1)] = acc.conj();
        }
    }
    let evs = linalg::eigvalsh_complex(&gram)?;
    let schmidt_sum: f64 = evs.iter().map(|v| v.max(0.0).sqrt()).sum();
    Ok((2.0 * schmidt_sum.log2()).max(0.0))
}

/// Logarithmic negativity of a bipartite density matrix with factor
/// dimensions (n_A, n_B): E_N = log₂ max(1, ‖ρ^{T_B}‖₁).
pub fn log_negativity_density(
    rho: &Array2<Complex64>,
    dims: (usize, usize),
) -> Result<f64> {
    let (na, nb) = dims;
    let n = na * nb;
    if rho.nrows() != n || rho.ncols() != n {
        return Err(CoreError::Composition(format!(
            "density matrix is {}×{}, expected {n}×{n} for factors {na}×{nb}",
            rho.nrows(),
            rho.ncols()
        )));
    }
    let trace: Complex64 = (0..n).map(|i| rho[(i, i)]).sum();
    if (trace.re - 1.0).abs() > 1e-8 || trace.im.abs() > 1e-8 {
        return Err(CoreError::NonPhysicalState(format!(
            "density-matrix trace = {trace}, expected 1"
        )));
    }
    let mut pt = Array2::<Complex64>::zeros((n, n));
    for a in 0..na {
        for b in 0..nb {
            for ap in 0..na {
                for bp in 0..nb {
                    pt[(a * nb + b, ap * nb + bp)] = rho[(a * nb + bp, ap * nb + b)];
                }
            }
        }
    }
    let tn = linalg::trace_norm_hermitian(&pt)?;
    Ok(tn.max(1.0).log2())
}

/// Physicality audit of an averaged state: Hermitian, unit trace and no
/// eigenvalue below −10⁻⁹.
pub fn check_density(rho: &Array2<Complex64>) -> Result<()> {
    let n = rho.nrows();
    if n != rho.ncols() {
        return Err(CoreError::Composition(format!(
            "density matrix must be square, got {}×{}",
            n,
            rho.ncols()
        )));
    }
    let mut defect = 0.0f64;
    for i in 0..n {
        for j in i..n {
            defect = defect.max((rho[(i, j)] - rho[(j, i)].conj()).norm());
        }
    }
    if defect > 1e-9 {
        return Err(CoreError::NonPhysicalState(format!(
            "density matrix Hermiticity defect {defect:.3e}"
        )));
    }
    let trace: Complex64 = (0..n).map(|i| rho[(i, i)]).sum();
    if (trace.re - 1.0).abs() > 1e-9 || trace.im.abs() > 1e-9 {
        return Err(CoreError::NonPhysicalState(format!(
            "density-matrix trace = {trace}, expected 1"
        )));
    }
    let evs = linalg::eigvalsh_complex(rho)?;
    if let Some(min) = evs.iter().copied().reduce(f64::min) {
        if min < -1e-9 {
            return Err(CoreError::NonPhysicalState(format!(
                "density matrix has eigenvalue {min:.3e} below −1e-9"
            )));
        }
    }
    Ok(())
}
