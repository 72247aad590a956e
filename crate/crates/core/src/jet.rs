//! Second-order Taylor jets for exact quadratic expansion of potentials.
//!
//! A [`Jet2`] carries the value, gradient and Hessian of a scalar function
//! evaluated at the expansion point, i.e. the truncated Taylor data
//!
//! ```text
//! f(x₀ + h) = f(x₀) + ∇f·h + ½ hᵀ (∇²f) h + O(h³).
//! ```
//!
//! Propagating jets through an exact potential such as
//! V(d̂) = −η d₀⁴ / d̂² with d̂ itself a smooth function of the mode
//! coordinates yields the *exact* second-order expansion — value, linear
//! forces and the full coupling Hessian — in one pass, with no hand-derived
//! series and no finite-difference truncation error.
//!
//! All arithmetic follows the chain rule at second order: for a unary map
//! u ↦ f(u),
//!
//! ```text
//! grad = f′(u) ∇u,
//! hess = f′(u) ∇²u + f″(u) ∇u ∇uᵀ,
//! ```
//!
//! and for products the symmetrised Leibniz rule. Hessians stay exactly
//! symmetric by construction because every update is of the form
//! `α·H + β·(g gᵀ + g′ gᵀ + g g′ᵀ)/…` built from symmetric pieces.

use ndarray::{Array1, Array2};
use std::ops::{Add, Div, Mul, Neg, Sub};

/// Value, gradient and Hessian of a scalar function of `n` variables.
#[derive(Debug, Clone, PartialEq)]
pub struct Jet2 {
    /// f(x₀).
    pub value: f64,
    /// ∇f(x₀), length n.
    pub grad: Array1<f64>,
    /// ∇²f(x₀), n×n symmetric.
    pub hess: Array2<f64>,
}

impl Jet2 {
    /// Constant function: zero gradient and Hessian.
    pub fn constant(value: f64, n: usize) -> Self {
        Self {
            value,
            grad: Array1::zeros(n),
            hess: Array2::zeros((n, n)),
        }
    }

    /// Coordinate function x_i evaluated at `value`.
    pub fn variable(index: usize, value: f64, n: usize) -> Self {
        assert!(index < n, "variable index {index} out of range for {n} variables");
        let mut grad = Array1::zeros(n);
        grad[index] = 1.0;
        Self {
            value,
            grad,
            hess: Array2::zeros((n, n)),
        }
    }

    /// Number of variables this jet is expanded in.
    pub fn nvars(&self) -> usize {
        self.grad.len()
    }

    fn assert_compatible(&self, other: &Self) {
        assert_eq!(
            self.nvars(),
            other.nvars(),
            "jet arity mismatch: {} vs {}",
            self.nvars(),
            other.nvars()
        );
    }

    /// Apply a smooth unary map given f(u), f′(u), f″(u).
    fn chain(&self, f: f64, df: f64, d2f: f64) -> Self {
        let outer = outer(&self.grad, &self.grad);
        Self {
            value: f,
            grad: &self.grad * df,
            hess: &self.hess * df + outer * d2f,
        }
    }

    /// Multiplicative inverse 1/u. Panics on u = 0 at the expansion point.
    pub fn recip(&self) -> Self {
        let u = self.value;
        assert!(u != 0.0, "jet reciprocal at zero");
        self.chain(1.0 / u, -1.0 / (u * u), 2.0 / (u * u * u))
    }

    /// Integer power uⁿ (n may be negative; u ≠ 0 required for n < 0).
    pub fn powi(&self, n: i32) -> Self {
        let u = self.value;
        if n < 0 {
            assert!(u != 0.0, "jet negative power at zero");
        }
        let f = u.powi(n);
        let df = if n == 0 { 0.0 } else { f64::from(n) * u.powi(n - 1) };
        let d2f = if n == 0 || n == 1 {
            0.0
        } else {
            f64::from(n) * f64::from(n - 1) * u.powi(n - 2)
        };
        self.chain(f, df, d2f)
    }

    /// Square root; requires u > 0 at the expansion point.
    pub fn sqrt(&self) -> Self {
        let u = self.value;
        assert!(u > 0.0, "jet sqrt of non-positive value {u}");
        let s = u.sqrt();
        self.chain(s, 0.5 / s, -0.25 / (s * u))
    }

    /// Sine.
    pub fn sin(&self) -> Self {
        let (s, c) = self.value.sin_cos();
        self.chain(s, c, -s)
    }

    /// Cosine.
    pub fn cos(&self) -> Self {
        let (s, c) = self.value.sin_cos();
        self.chain(c, -s, -c)
    }

    /// Scale by a constant.
    pub fn scale(&self, a: f64) -> Self {
        Self {
            value: a * self.value,
            grad: &self.grad * a,
            hess: &self.hess * a,
        }
    }
}

fn outer(a: &Array1<f64>, b: &Array1<f64>) -> Array2<f64> {
    let (n, m) = (a.len(), b.len());
    let mut out = Array2::zeros((n, m));
    for i in 0..n {
        for j in 0..m {
            out[(i, j)] = a[i] * b[j];
        }
    }
    out
}

impl Add for &Jet2 {
    type Output = Jet2;
    fn add(self, rhs: &Jet2) -> Jet2 {
        self.assert_compatible(rhs);
        Jet2 {
            value: self.value + rhs.value,
            grad: &self.grad + &rhs.grad,
            hess: &self.hess + &rhs.hess,
        }
    }
}

impl Sub for &Jet2 {
    type Output = Jet2;
    fn sub(self, rhs: &Jet2) -> Jet2 {
        self.assert_compatible(rhs);
        Jet2 {
            value: self.value - rhs.value,
            grad: &self.grad - &rhs.grad,
            hess: &self.hess - &rhs.hess,
        }
    }
}

impl Neg for &Jet2 {
    type Output = Jet2;
    fn neg(self) -> Jet2 {
        self.scale(-1.0)
    }
}

impl Mul for &Jet2 {
    type Output = Jet2;
    fn mul(self, rhs: &Jet2) -> Jet2 {
        self.assert_compatible(rhs);
        let cross = outer(&self.grad, &rhs.grad);
        let cross_t = cross.t().to_owned();
        Jet2 {
            value: self.value * rhs.value,
            grad: &self.grad * rhs.value + &rhs.grad * self.value,
            hess: &self.hess * rhs.value + &rhs.hess * self.value + cross + cross_t,
        }
    }
}

impl Div for &Jet2 {
    type Output = Jet2;
    // Division is deliberately composed as multiplication by the
    // reciprocal jet, which carries the chain rule.
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn div(self, rhs: &Jet2) -> Jet2 {
        self * &rhs.recip()
    }
}

impl Mul<f64> for &Jet2 {
    type Output = Jet2;
    fn mul(self, rhs: f64) -> Jet2 {
        self.scale(rhs)
    }
}

impl Add<f64> for &Jet2 {
    type Output = Jet2;
    fn add(self, rhs: f64) -> Jet2 {
        let mut out = self.clone();
        out.value += rhs;
        out
    }
}
