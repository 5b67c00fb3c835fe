//! Dense matrix primitives: Kronecker operations, Metzler checks, spectral
//! abscissa and the action of the matrix exponential.

use nalgebra::{DMatrix, DVector};

use crate::config::Tolerances;
use crate::error::{Error, Result};

pub type Matrix = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Kronecker product `a ⊗ b`.
pub fn kron(a: &Matrix, b: &Matrix) -> Matrix {
    a.kronecker(b)
}

/// Kronecker sum `a ⊕ b = a ⊗ I + I ⊗ b`.
pub fn kron_sum(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    ensure_square(a)?;
    ensure_square(b)?;
    let (p, q) = (a.nrows(), b.nrows());
    Ok(kron(a, &Matrix::identity(q, q)) + kron(&Matrix::identity(p, p), b))
}

/// True iff every off-diagonal entry is nonnegative. Exact comparison.
pub fn is_metzler(m: &Matrix) -> bool {
    debug_assert!(m.is_square());
    let n = m.nrows();
    (0..n).all(|i| (0..n).all(|j| i == j || m[(i, j)] >= 0.0))
}

pub(crate) fn ensure_square(m: &Matrix) -> Result<()> {
    if m.is_square() {
        Ok(())
    } else {
        Err(Error::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        })
    }
}

fn ensure_finite(m: &Matrix) -> Result<()> {
    if m.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite)
    }
}

/// Largest real part over the eigenvalues of `m`.
pub fn spectral_abscissa(m: &Matrix) -> Result<f64> {
    spectral_abscissa_with(m, &Tolerances::default())
}

/// Spectral abscissa with explicit tolerances.
///
/// Metzler inputs larger than `dense_eigen_max_dim` go through the
/// shifted power iteration; everything else through the dense real Schur
/// decomposition.
pub fn spectral_abscissa_with(m: &Matrix, tol: &Tolerances) -> Result<f64> {
    ensure_square(m)?;
    ensure_finite(m)?;
    if m.nrows() <= tol.dense_eigen_max_dim {
        dense_spectral_abscissa(m)
    } else if is_metzler(m) {
        metzler_abscissa_power(m, tol)
    } else {
        Err(Error::TooLarge {
            what: "dense eigensolve",
            size: m.nrows() as u128,
            cap: tol.dense_eigen_max_dim as u128,
        })
    }
}

/// Spectral abscissa through a full Hessenberg reduction and shifted QR
/// iteration (faer's real Schur solver), or the symmetric tridiagonal
/// solver when `m` is symmetric. Fails loudly when the iteration does not
/// converge.
pub fn dense_spectral_abscissa(m: &Matrix) -> Result<f64> {
    ensure_square(m)?;
    ensure_finite(m)?;
    if m.nrows() > 0 && *m == m.transpose() {
        let eig = faer::Mat::<f64>::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
            .self_adjoint_eigenvalues(faer::Side::Lower)
            .map_err(|_| Error::EigenNoConvergence { dim: m.nrows() })?;
        return Ok(eig.iter().copied().fold(f64::NEG_INFINITY, f64::max));
    }
    let eig = eigenvalues(m)?;
    Ok(eig.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max))
}

/// All eigenvalues of a real square matrix.
pub fn eigenvalues(m: &Matrix) -> Result<Vec<nalgebra::Complex<f64>>> {
    ensure_square(m)?;
    let dim = m.nrows();
    if dim == 0 {
        return Ok(Vec::new());
    }
    let dense = faer::Mat::<f64>::from_fn(dim, dim, |i, j| m[(i, j)]);
    let eig = dense.eigenvalues().map_err(|_| Error::EigenNoConvergence { dim })?;
    Ok(eig.iter().map(|z| nalgebra::Complex::new(z.re, z.im)).collect())
}

/// Perron root of a Metzler matrix by power iteration on `m + sI`, with
/// `s = max|m_ii| + 1`. Stops once the Collatz–Wielandt bracket
/// `[min (Bv)_i / v_i, max (Bv)_i / v_i]` is narrower than `power_tol`.
pub fn metzler_abscissa_power(m: &Matrix, tol: &Tolerances) -> Result<f64> {
    ensure_square(m)?;
    ensure_finite(m)?;
    if !is_metzler(m) {
        return Err(Error::InvalidParameter(
            "power iteration requires a Metzler matrix".into(),
        ));
    }
    let n = m.nrows();
    let shift = m.diagonal().iter().fold(0.0_f64, |acc, x| acc.max(x.abs())) + 1.0;
    let shifted = m + Matrix::identity(n, n) * shift;
    let mut v = Vector::from_element(n, 1.0 / (n as f64).sqrt());
    for _ in 0..tol.power_max_iter {
        let w = &shifted * &v;
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for i in 0..n {
            if v[i] > f64::MIN_POSITIVE {
                let ratio = w[i] / v[i];
                lo = lo.min(ratio);
                hi = hi.max(ratio);
            }
        }
        if hi - lo <= tol.power_tol * hi.abs().max(1.0) {
            return Ok(0.5 * (lo + hi) - shift);
        }
        let norm = w.norm();
        if norm == 0.0 {
            return Ok(-shift);
        }
        v = w / norm;
    }
    Err(Error::PowerIterationNoConvergence {
        iterations: tol.power_max_iter,
    })
}

/// `e^{mt} v`.
pub fn expm_action(m: &Matrix, v: &Vector, t: f64) -> Result<Vector> {
    expm_action_with(m, v, t, &Tolerances::default())
}

/// `e^{mt} v` with explicit tolerances. Metzler matrices use
/// uniformization, which keeps the result entrywise nonnegative for
/// nonnegative `v`; other matrices fall back to scaling and squaring.
pub fn expm_action_with(m: &Matrix, v: &Vector, t: f64, tol: &Tolerances) -> Result<Vector> {
    ensure_square(m)?;
    if m.nrows() != v.len() {
        return Err(Error::DimensionMismatch(format!(
            "{}x{} matrix applied to vector of length {}",
            m.nrows(),
            m.ncols(),
            v.len()
        )));
    }
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::InvalidParameter(format!("time must be >= 0, got {t}")));
    }
    if t == 0.0 || m.iter().all(|x| *x == 0.0) {
        return Ok(v.clone());
    }
    if is_metzler(m) {
        Ok(uniformization(m, v, t, tol.expm_tol))
    } else {
        Ok(expm(m, t, tol.expm_tol) * v)
    }
}

fn uniformization(m: &Matrix, v: &Vector, t: f64, eps: f64) -> Vector {
    let n = m.nrows();
    let rate = m.diagonal().iter().fold(0.0_f64, |acc, x| acc.max(x.abs()));
    let rate = if rate > 0.0 { rate } else { m.amax() };
    let p = Matrix::identity(n, n) + m / rate;
    let p_norm = p
        .row_iter()
        .map(|r| r.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0_f64, f64::max);
    // Keep each step's Poisson mean small enough that e^{-rate h} and the
    // largest series term stay representable.
    const STEP_MEAN: f64 = 20.0;
    let steps = (rate * t / STEP_MEAN).ceil().max(1.0) as usize;
    let h = t / steps as f64;
    let mean = rate * h;
    let damp = (-mean).exp();
    let mut out = v.clone();
    for _ in 0..steps {
        let mut term = out.clone();
        let mut acc = out.clone();
        let mut k = 1usize;
        loop {
            term = &p * &term * (mean / k as f64);
            acc += &term;
            let acc_norm = acc.amax();
            if k as f64 > mean * p_norm && term.amax() <= eps * acc_norm.max(f64::MIN_POSITIVE) {
                break;
            }
            if term.amax() == 0.0 || k >= 100_000 {
                break;
            }
            k += 1;
        }
        out = acc * damp;
    }
    out
}

/// Dense `e^{mt}` by scaling and squaring with a truncated Taylor series.
pub fn expm(m: &Matrix, t: f64, eps: f64) -> Matrix {
    let n = m.nrows();
    let a = m * t;
    let norm1 = a
        .column_iter()
        .map(|c| c.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0_f64, f64::max);
    let squarings = if norm1 > 0.5 {
        (norm1 / 0.5).log2().ceil() as i32
    } else {
        0
    };
    let scaled = a / 2f64.powi(squarings);
    let mut result = Matrix::identity(n, n);
    let mut term = Matrix::identity(n, n);
    for k in 1..=60 {
        term = &term * &scaled / k as f64;
        result += &term;
        if term.amax() <= eps * result.amax() {
            break;
        }
    }
    for _ in 0..squarings {
        result = &result * &result;
    }
    result
}
