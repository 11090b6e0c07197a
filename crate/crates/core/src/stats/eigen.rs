//! Symmetric eigendecomposition (Householder tridiagonalisation followed by
//! implicit QL) and the PSD square root built on it.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::matrix::Matrix;

/// Eigen-decomposition of a symmetric matrix.
#[derive(Debug, Clone)]
pub struct SymEigen<T> {
    /// Eigenvalues, descending.
    pub values: Vec<T>,
    /// Orthonormal eigenvectors stored as columns, in the order of `values`.
    pub vectors: Matrix<T>,
}

impl<T: Scalar> SymEigen<T> {
    /// Reassembles `V diag(f(λ)) Vᵀ`.
    pub fn reconstruct_with(&self, f: impl Fn(T) -> T) -> Matrix<T> {
        let n = self.values.len();
        let mapped: Vec<T> = self.values.iter().map(|&l| f(l)).collect();
        let v = &self.vectors;
        let mut out = Matrix::zeros(n, n);
        for r in 0..n {
            for c in r..n {
                let mut acc = T::zero();
                for (k, &l) in mapped.iter().enumerate() {
                    acc += v[(r, k)] * l * v[(c, k)];
                }
                out[(r, c)] = acc;
                out[(c, r)] = acc;
            }
        }
        out
    }

    pub fn reconstruct(&self) -> Matrix<T> {
        self.reconstruct_with(|l| l)
    }
}

fn check_symmetric<T: Scalar>(m: &Matrix<T>) -> Result<()> {
    if !m.is_square() {
        return Err(Error::DimensionMismatch(format!(
            "eigendecomposition needs a square matrix, got {}x{}",
            m.rows(),
            m.cols()
        )));
    }
    let asym = m.asymmetry().to_f64_lossy();
    let tol = T::SYMMETRY_TOL * m.frobenius_norm().to_f64_lossy();
    if !(asym <= tol) {
        return Err(Error::Asymmetric {
            asymmetry: asym,
            tolerance: tol,
        });
    }
    Ok(())
}

/// Eigenvalues (descending) and orthonormal eigenvectors of a symmetric matrix.
///
/// The input must be symmetric within `SYMMETRY_TOL·‖m‖_F`; it is symmetrised
/// before factorisation. The decomposition is accepted only if
/// `‖mV − VΛ‖_F ≤ EIG_RESIDUAL_TOL·max(1, ‖m‖_F)`.
pub fn sym_eig<T: Scalar>(m: &Matrix<T>) -> Result<SymEigen<T>> {
    check_symmetric(m)?;
    let n = m.rows();
    if n == 0 {
        return Ok(SymEigen {
            values: Vec::new(),
            vectors: Matrix::zeros(0, 0),
        });
    }
    let mut v = m.clone();
    v.symmetrize();
    let mut d = vec![T::zero(); n];
    let mut e = vec![T::zero(); n];
    tridiagonalize(&mut v, &mut d, &mut e);
    tridiagonal_ql(&mut v, &mut d, &mut e)?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| d[b].partial_cmp(&d[a]).unwrap_or(std::cmp::Ordering::Equal));
    let values: Vec<T> = order.iter().map(|&i| d[i]).collect();
    let mut vectors = Matrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        for r in 0..n {
            vectors[(r, dst)] = v[(r, src)];
        }
    }
    let eig = SymEigen { values, vectors };

    let residual = eigen_residual(m, &eig).to_f64_lossy();
    let bound = T::EIG_RESIDUAL_TOL * m.frobenius_norm().to_f64_lossy().max(1.0);
    if !(residual <= bound) {
        return Err(Error::NonConvergence(format!(
            "residual {residual:.3e} exceeds {bound:.3e}"
        )));
    }
    Ok(eig)
}

/// `‖mV − VΛ‖_F`.
pub fn eigen_residual<T: Scalar>(m: &Matrix<T>, eig: &SymEigen<T>) -> T {
    let n = m.rows();
    let v = &eig.vectors;
    let mut acc = T::zero();
    for r in 0..n {
        let m_row = m.row(r);
        for c in 0..n {
            let mut mv = T::zero();
            for (k, &mk) in m_row.iter().enumerate() {
                mv += mk * v[(k, c)];
            }
            let diff = mv - v[(r, c)] * eig.values[c];
            acc += diff * diff;
        }
    }
    acc.sqrt()
}

// Householder reduction to tridiagonal form. On exit `v` holds the
// accumulated orthogonal transform, `d` the diagonal and `e[1..]` the
// sub-diagonal.
fn tridiagonalize<T: Scalar>(v: &mut Matrix<T>, d: &mut [T], e: &mut [T]) {
    let n = d.len();
    for j in 0..n {
        d[j] = v[(n - 1, j)];
    }
    for i in (1..n).rev() {
        let mut scale = T::zero();
        let mut h = T::zero();
        for dk in &d[..i] {
            scale += dk.abs();
        }
        if scale == T::zero() {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = v[(i - 1, j)];
                v[(i, j)] = T::zero();
                v[(j, i)] = T::zero();
            }
        } else {
            for dk in &mut d[..i] {
                *dk /= scale;
                h += *dk * *dk;
            }
            let mut f = d[i - 1];
            let mut g = h.sqrt();
            if f > T::zero() {
                g = -g;
            }
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            for ej in &mut e[..i] {
                *ej = T::zero();
            }
            for j in 0..i {
                f = d[j];
                v[(j, i)] = f;
                g = e[j] + v[(j, j)] * f;
                for k in (j + 1)..i {
                    g += v[(k, j)] * d[k];
                    e[k] += v[(k, j)] * f;
                }
                e[j] = g;
            }
            f = T::zero();
            for j in 0..i {
                e[j] /= h;
                f += e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] -= hh * d[j];
            }
            for j in 0..i {
                f = d[j];
                g = e[j];
                for k in j..i {
                    let upd = f * e[k] + g * d[k];
                    v[(k, j)] -= upd;
                }
                d[j] = v[(i - 1, j)];
                v[(i, j)] = T::zero();
            }
        }
        d[i] = h;
    }

    for i in 0..n.saturating_sub(1) {
        v[(n - 1, i)] = v[(i, i)];
        v[(i, i)] = T::one();
        let h = d[i + 1];
        if h != T::zero() {
            for k in 0..=i {
                d[k] = v[(k, i + 1)] / h;
            }
            for j in 0..=i {
                let mut g = T::zero();
                for k in 0..=i {
                    g += v[(k, i + 1)] * v[(k, j)];
                }
                for k in 0..=i {
                    let upd = g * d[k];
                    v[(k, j)] -= upd;
                }
            }
        }
        for k in 0..=i {
            v[(k, i + 1)] = T::zero();
        }
    }
    for j in 0..n {
        d[j] = v[(n - 1, j)];
        v[(n - 1, j)] = T::zero();
    }
    v[(n - 1, n - 1)] = T::one();
    e[0] = T::zero();
}

// Implicit QL iterations on the tridiagonal form, accumulating rotations into `v`.
fn tridiagonal_ql<T: Scalar>(v: &mut Matrix<T>, d: &mut [T], e: &mut [T]) -> Result<()> {
    let n = d.len();
    let max_iterations = 100 * n.max(1);
    let mut iterations = 0usize;
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = T::zero();

    let two = T::of(2.0);
    let mut f = T::zero();
    let mut tst1 = T::zero();
    let eps = T::epsilon();
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n - 1 {
            if e[m].abs() <= eps * tst1 {
                break;
            }
            m += 1;
        }
        if m > l {
            loop {
                iterations += 1;
                if iterations > max_iterations {
                    return Err(Error::NonConvergence(format!(
                        "QL iteration cap {max_iterations} reached"
                    )));
                }
                let mut g = d[l];
                let mut p = (d[l + 1] - g) / (two * e[l]);
                let mut r = p.hypot(T::one());
                if p < T::zero() {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for di in &mut d[(l + 2)..n] {
                    *di -= h;
                }
                f += h;

                p = d[m];
                let mut c = T::one();
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = T::zero();
                let mut s2 = T::zero();
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    for k in 0..n {
                        let vk1 = v[(k, i + 1)];
                        let vk = v[(k, i)];
                        v[(k, i + 1)] = s * vk + c * vk1;
                        v[(k, i)] = c * vk - s * vk1;
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if !(e[l].abs() > eps * tst1) {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = T::zero();
    }
    if d.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonConvergence("non-finite eigenvalue".into()));
    }
    Ok(())
}

/// Clamps eigenvalues of a nominally PSD spectrum: values in
/// `[-1e-8·λ_max, 0)` become 0, anything lower is an error.
pub(crate) fn clamp_psd_spectrum<T: Scalar>(values: &[T]) -> Result<Vec<T>> {
    let lambda_max = values
        .iter()
        .fold(T::zero(), |acc, &l| acc.max(l.abs()));
    let tol = T::of(1e-8) * lambda_max;
    values
        .iter()
        .map(|&l| {
            if l >= T::zero() {
                Ok(l)
            } else if l >= -tol {
                Ok(T::zero())
            } else {
                Err(Error::Indefinite {
                    eigenvalue: l.to_f64_lossy(),
                    tolerance: -tol.to_f64_lossy(),
                })
            }
        })
        .collect()
}

/// Symmetric PSD square root `V diag(√λ) Vᵀ`.
pub fn psd_sqrt<T: Scalar>(m: &Matrix<T>) -> Result<Matrix<T>> {
    let mut eig = sym_eig(m)?;
    eig.values = clamp_psd_spectrum(&eig.values)?;
    Ok(eig.reconstruct_with(|l| l.sqrt()))
}

/// `Tr(m^{1/2})` for a symmetric PSD matrix, from its eigenvalues.
pub fn trace_sqrt<T: Scalar>(m: &Matrix<T>) -> Result<T> {
    let eig = sym_eig(m)?;
    Ok(clamp_psd_spectrum(&eig.values)?
        .into_iter()
        .map(|l| l.sqrt())
        .sum())
}
