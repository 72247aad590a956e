//! Dense linear algebra built on the system LAPACK (`dsyevd`, `dgesv`) plus a
//! Padé scaling-and-squaring matrix exponential.
//!
//! Matrices never exceed a few thousand rows here (phase-space dimension is
//! 2·#modes; Fock Hamiltonians go up to ~4096), so dense methods suffice.
//! Complex Hermitian eigenproblems are routed through the real-symmetric
//! embedding `[[Re, -Im], [Im, Re]]`, whose spectrum is the Hermitian spectrum
//! with every eigenvalue doubled.

use crate::error::{CoreError, Result};
use ndarray::{Array1, Array2};
use num_complex::Complex64;

/// Eigendecomposition of a real symmetric matrix (LAPACK dsyevd).
///
/// Returns `(w, v)` with eigenvalues `w` in ascending order and eigenvector
/// `j` stored in column `j` of `v` (so `a · v[:,j] = w[j] · v[:,j]`).
pub fn eigh(a: &Array2<f64>) -> Result<(Array1<f64>, Array2<f64>)> {
    let n = a.nrows();
    if n != a.ncols() {
        return Err(CoreError::Composition(format!(
            "eigh needs a square matrix, got {}x{}",
            n,
            a.ncols()
        )));
    }
    if n == 0 {
        return Ok((Array1::zeros(0), Array2::zeros((0, 0))));
    }
    // Column-major buffer; the input is symmetric so the layout is moot.
    let mut buf: Vec<f64> = Vec::with_capacity(n * n);
    for j in 0..n {
        for i in 0..n {
            buf.push(a[[i, j]]);
        }
    }
    let mut w = vec![0.0f64; n];
    let ni = n as i32;
    let mut info = 0i32;
    let jobz = b'V' as std::ffi::c_char;
    let uplo = b'U' as std::ffi::c_char;
    unsafe {
        // Workspace query.
        let (lwork_q, liwork_q) = (-1i32, -1i32);
        let mut wq = [0.0f64];
        let mut iwq = [0i32];
        lapack_sys::dsyevd_(
            &jobz,
            &uplo,
            &ni,
            buf.as_mut_ptr(),
            &ni,
            w.as_mut_ptr(),
            wq.as_mut_ptr(),
            &lwork_q,
            iwq.as_mut_ptr(),
            &liwork_q,
            &mut info,
        );
        if info != 0 {
            return Err(CoreError::Numeric(format!("dsyevd workspace query failed (info={info})")));
        }
        let lwork = wq[0] as i32;
        let liwork = iwq[0];
        let mut work = vec![0.0f64; lwork.max(1) as usize];
        let mut iwork = vec![0i32; liwork.max(1) as usize];
        lapack_sys::dsyevd_(
            &jobz,
            &uplo,
            &ni,
            buf.as_mut_ptr(),
            &ni,
            w.as_mut_ptr(),
            work.as_mut_ptr(),
            &lwork,
            iwork.as_mut_ptr(),
            &liwork,
            &mut info,
        );
    }
    if info != 0 {
        return Err(CoreError::Numeric(format!("dsyevd failed to converge (info={info})")));
    }
    // buf is column-major V; wrapping it row-major yields Vᵀ, so reverse axes.
    let vt = Array2::from_shape_vec((n, n), buf)
        .map_err(|e| CoreError::Numeric(format!("eigh reshape: {e}")))?;
    Ok((Array1::from_vec(w), vt.reversed_axes().to_owned()))
}

/// Eigenvalues of a real symmetric matrix (ascending), without vectors.
pub fn eigvalsh(a: &Array2<f64>) -> Result<Array1<f64>> {
    // dsyevd with jobz='N' would avoid the vector work, but the sizes used in
    // this crate make the savings irrelevant; reuse the full decomposition.
    Ok(eigh(a)?.0)
}

/// Solve the linear system `A X = B` for square `A` (LAPACK dgesv).
pub fn solve(a: &Array2<f64>, b: &Array2<f64>) -> Result<Array2<f64>> {
    let n = a.nrows();
    if n != a.ncols() {
        return Err(CoreError::Composition("solve needs square A".into()));
    }
    if b.nrows() != n {
        return Err(CoreError::Composition(format!(
            "solve dimension mismatch: A is {}x{}, B has {} rows",
            n,
            n,
            b.nrows()
        )));
    }
    let nrhs = b.ncols();
    let mut a_cm: Vec<f64> = Vec::with_capacity(n * n);
    for j in 0..n {
        for i in 0..n {
            a_cm.push(a[[i, j]]);
        }
    }
    let mut b_cm: Vec<f64> = Vec::with_capacity(n * nrhs);
    for j in 0..nrhs {
        for i in 0..n {
            b_cm.push(b[[i, j]]);
        }
    }
    let ni = n as i32;
    let nrhsi = nrhs as i32;
    let mut ipiv = vec![0i32; n];
    let mut info = 0i32;
    unsafe {
        lapack_sys::dgesv_(
            &ni,
            &nrhsi,
            a_cm.as_mut_ptr(),
            &ni,
            ipiv.as_mut_ptr(),
            b_cm.as_mut_ptr(),
            &ni,
            &mut info,
        );
    }
    if info != 0 {
        return Err(CoreError::Numeric(format!(
            "dgesv failed (info={info}); matrix is singular to working precision"
        )));
    }
    let mut x = Array2::zeros((n, nrhs));
    for j in 0..nrhs {
        for i in 0..n {
            x[[i, j]] = b_cm[i + j * n];
        }
    }
    Ok(x)
}

/// Maximum absolute column sum (the matrix 1-norm).
pub fn one_norm(a: &Array2<f64>) -> f64 {
    let mut best = 0.0f64;
    for j in 0..a.ncols() {
        let s: f64 = a.column(j).iter().map(|x| x.abs()).sum();
        if s > best {
            best = s;
        }
    }
    best
}

/// Matrix exponential by Padé(13) approximation with scaling and squaring.
///
/// The [13/13] diagonal Padé approximant is accurate to double precision for
/// ‖A‖₁ ≤ 5.371920351148152; larger inputs are scaled by 2⁻ˢ first and the
/// result squared back. A single fixed order keeps the routine simple; the
/// extra multiplications for small inputs are irrelevant at these sizes.
pub fn expm(a: &Array2<f64>) -> Result<Array2<f64>> {
    const THETA_13: f64 = 5.371920351148152;
    #[allow(clippy::excessive_precision)]
    const B: [f64; 14] = [
        64764752532480000.0,
        32382376266240000.0,
        7771770303897600.0,
        1187353796428800.0,
        129060195264000.0,
        10559470521600.0,
        670442572800.0,
        33522128640.0,
        1323241920.0,
        40840800.0,
        960960.0,
        16380.0,
        182.0,
        1.0,
    ];
    let n = a.nrows();
    if n != a.ncols() {
        return Err(CoreError::Composition("expm needs a square matrix".into()));
    }
    let norm = one_norm(a);
    let s = if norm > THETA_13 {
        (norm / THETA_13).log2().ceil().max(0.0) as u32
    } else {
        0
    };
    let a_scaled = a.mapv(|x| x / f64::powi(2.0, s as i32));

    let eye = Array2::<f64>::eye(n);
    let a2 = a_scaled.dot(&a_scaled);
    let a4 = a2.dot(&a2);
    let a6 = a2.dot(&a4);

    let u_inner = a6.mapv(|x| x * B[13]) + &a4.mapv(|x| x * B[11]) + &a2.mapv(|x| x * B[9]);
    let u_poly =
        a6.dot(&u_inner) + &a6.mapv(|x| x * B[7]) + &a4.mapv(|x| x * B[5]) + &a2.mapv(|x| x * B[3]) + &eye.mapv(|x| x * B[1]);
    let u = a_scaled.dot(&u_poly);

    let v_inner = a6.mapv(|x| x * B[12]) + &a4.mapv(|x| x * B[10]) + &a2.mapv(|x| x * B[8]);
    let v = a6.dot(&v_inner) + &a6.mapv(|x| x * B[6]) + &a4.mapv(|x| x * B[4]) + &a2.mapv(|x| x * B[2]) + &eye.mapv(|x| x * B[0]);

    // (V - U) X = (V + U)
    let mut r = solve(&(&v - &u), &(&v + &u))?;
    for _ in 0..s {
        r = r.dot(&r);
    }
    Ok(r)
}

/// Principal square root of a symmetric positive semidefinite matrix.
///
/// Eigenvalues within `-1e-12·max(|w|)` of zero are clamped to zero; anything
/// more negative is rejected as non-PSD.
pub fn sqrtm_psd(a: &Array2<f64>) -> Result<Array2<f64>> {
    let (w, v) = eigh(a)?;
    let scale = w.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let tol = 1e-12 * scale.max(1.0);
    let mut sq = Array2::<f64>::zeros(a.dim());
    for (j, &lam) in w.iter().enumerate() {
        if lam < -tol {
            return Err(CoreError::NonPhysicalState(format!(
                "matrix square root of non-PSD input (eigenvalue {lam:.3e})"
            )));
        }
        let root = lam.max(0.0).sqrt();
        let col = v.column(j);
        for i in 0..a.nrows() {
            for k in 0..a.ncols() {
                sq[[i, k]] += root * col[i] * col[k];
            }
        }
    }
    Ok(sq)
}

/// Propagator pair for a constant drift matrix: `S(t) = exp(Kt)` together with
/// `J(t) = ∫₀ᵗ exp(Ks) ds`, computed in one augmented exponential
/// `exp([[K, I], [0, 0]]·t) = [[S, J], [0, I]]` (Van Loan block method).
pub fn propagator_with_integral(k: &Array2<f64>, t: f64) -> Result<(Array2<f64>, Array2<f64>)> {
    let n = k.nrows();
    let mut aug = Array2::<f64>::zeros((2 * n, 2 * n));
    for i in 0..n {
        for j in 0..n {
            aug[[i, j]] = k[[i, j]] * t;
        }
        aug[[i, n + i]] = t;
    }
    let e = expm(&aug)?;
    let mut s = Array2::<f64>::zeros((n, n));
    let mut jint = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            s[[i, j]] = e[[i, j]];
            jint[[i, j]] = e[[i, n + j]];
        }
    }
    Ok((s, jint))
}

/// Diffusion integral `Q(t) = ∫₀ᵗ exp(K(t−s)) · D · exp(Kᵀ(t−s)) ds` via the
/// Van Loan augmented exponential of `[[-K, D], [0, Kᵀ]]·t`: with blocks
/// `[[F1, F2], [0, F3]]`, the integral is `F3ᵀ · F2`.
pub fn diffusion_integral(k: &Array2<f64>, d: &Array2<f64>, t: f64) -> Result<Array2<f64>> {
    let n = k.nrows();
    let mut aug = Array2::<f64>::zeros((2 * n, 2 * n));
    for i in 0..n {
        for j in 0..n {
            aug[[i, j]] = -k[[i, j]] * t;
            aug[[i, n + j]] = d[[i, j]] * t;
            aug[[n + i, n + j]] = k[[j, i]] * t;
        }
    }
    let e = expm(&aug)?;
    let mut f2 = Array2::<f64>::zeros((n, n));
    let mut f3 = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            f2[[i, j]] = e[[i, n + j]];
            f3[[i, j]] = e[[n + i, n + j]];
        }
    }
    Ok(f3.t().dot(&f2))
}

/// Symplectic form Ω = ⊕ₘ [[0, 1], [-1, 0]] over `n_modes` modes, in the
/// mode-interleaved quadrature ordering (X₁, P₁, X₂, P₂, …).
pub fn symplectic_form(n_modes: usize) -> Array2<f64> {
    let mut om = Array2::<f64>::zeros((2 * n_modes, 2 * n_modes));
    for m in 0..n_modes {
        om[[2 * m, 2 * m + 1]] = 1.0;
        om[[2 * m + 1, 2 * m]] = -1.0;
    }
    om
}

/// Eigenvalues of a complex Hermitian matrix, ascending, via the
/// real-symmetric embedding (each eigenvalue appears twice in the embedding;
/// the doubled spectrum is collapsed by taking every second entry).
pub fn eigvalsh_complex(h: &Array2<Complex64>) -> Result<Array1<f64>> {
    let n = h.nrows();
    if n != h.ncols() {
        return Err(CoreError::Composition("eigvalsh_complex needs square input".into()));
    }
    let mut herm_defect = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            herm_defect = herm_defect.max((h[[i, j]] - h[[j, i]].conj()).norm());
        }
    }
    let scale = h.iter().fold(0.0f64, |m, z| m.max(z.norm()));
    if herm_defect > 1e-10 * scale.max(1.0) {
        return Err(CoreError::NonPhysicalState(format!(
            "matrix is not Hermitian (defect {herm_defect:.3e})"
        )));
    }
    let mut emb = Array2::<f64>::zeros((2 * n, 2 * n));
    for i in 0..n {
        for j in 0..n {
            let z = h[[i, j]];
            emb[[i, j]] = z.re;
            emb[[i, n + j]] = -z.im;
            emb[[n + i, j]] = z.im;
            emb[[n + i, n + j]] = z.re;
        }
    }
    let w = eigvalsh(&emb)?;
    let collapsed: Vec<f64> = (0..n).map(|i| 0.5 * (w[2 * i] + w[2 * i + 1])).collect();
    Ok(Array1::from_vec(collapsed))
}

/// Trace norm ‖H‖₁ = Σ|λᵢ| of a complex Hermitian matrix.
pub fn trace_norm_hermitian(h: &Array2<Complex64>) -> Result<f64> {
    Ok(eigvalsh_complex(h)?.iter().map(|x| x.abs()).sum())
}
