//! Dense complex linear algebra for small Hermitian matrices.
//!
//! Everything here is sized for antenna-array problems (N up to a few tens):
//! cyclic Jacobi eigendecomposition, complex Cholesky, a packed real
//! parameterization of the Hermitian space, and seeded complex Gaussian
//! sampling. No external LAPACK backend is used so the routines stay generic
//! over the scalar type.

use ndarray::{Array1, Array2};
use num_complex::Complex;
use rand::Rng;

use crate::scalar::Scalar;

pub type C<T> = Complex<T>;
pub type CVector<T> = Array1<Complex<T>>;
pub type CMatrix<T> = Array2<Complex<T>>;

pub fn czero<T: Scalar>() -> C<T> {
    Complex::new(T::zero(), T::zero())
}

pub fn cmat_zeros<T: Scalar>(n: usize) -> CMatrix<T> {
    Array2::from_elem((n, n), czero::<T>())
}

pub fn scaled_identity<T: Scalar>(n: usize, scale: T) -> CMatrix<T> {
    let mut m = cmat_zeros(n);
    for i in 0..n {
        m[[i, i]] = Complex::new(scale, T::zero());
    }
    m
}

/// Conjugate transpose.
pub fn adjoint<T: Scalar>(a: &CMatrix<T>) -> CMatrix<T> {
    let mut out = Array2::from_elem((a.ncols(), a.nrows()), czero::<T>());
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            out[[j, i]] = a[[i, j]].conj();
        }
    }
    out
}

/// `(A + A^H)/2`.
pub fn hermitian_part<T: Scalar>(a: &CMatrix<T>) -> CMatrix<T> {
    let half = T::of(0.5);
    let mut out = a.clone();
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            out[[i, j]] = (a[[i, j]] + a[[j, i]].conj()) * Complex::new(half, T::zero());
        }
    }
    out
}

/// Hermitian within `rel_tol` relative to the matrix norm.
pub fn is_hermitian<T: Scalar>(a: &CMatrix<T>, rel_tol: T) -> bool {
    if a.nrows() != a.ncols() {
        return false;
    }
    let scale = frob_norm(a).max(T::min_positive_value());
    let mut dev = T::zero();
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            let d = a[[i, j]] - a[[j, i]].conj();
            dev = dev.max(d.norm());
        }
    }
    dev <= rel_tol * scale
}

pub fn frob_norm<T: Scalar>(a: &CMatrix<T>) -> T {
    a.iter().map(|z| z.norm_sqr()).sum::<T>().sqrt()
}

/// Real inner product on the Hermitian space: `Re tr(A^H B)`.
pub fn frob_inner<T: Scalar>(a: &CMatrix<T>, b: &CMatrix<T>) -> T {
    debug_assert_eq!(a.dim(), b.dim());
    let mut acc = T::zero();
    for (x, y) in a.iter().zip(b.iter()) {
        acc += x.re * y.re + x.im * y.im;
    }
    acc
}

pub fn trace_re<T: Scalar>(a: &CMatrix<T>) -> T {
    let mut acc = T::zero();
    for i in 0..a.nrows() {
        acc += a[[i, i]].re;
    }
    acc
}

/// `u v^H` outer product.
pub fn outer<T: Scalar>(u: &CVector<T>, v: &CVector<T>) -> CMatrix<T> {
    let mut m = Array2::from_elem((u.len(), v.len()), czero::<T>());
    for i in 0..u.len() {
        for j in 0..v.len() {
            m[[i, j]] = u[i] * v[j].conj();
        }
    }
    m
}

/// Real part of the quadratic form `v^H M v`.
pub fn quad_form_re<T: Scalar>(m: &CMatrix<T>, v: &CVector<T>) -> T {
    let mut acc = czero::<T>();
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            acc += v[i].conj() * m[[i, j]] * v[j];
        }
    }
    acc.re
}

/// Lower-triangular Cholesky factor of a Hermitian matrix, or `None` when the
/// matrix is not strictly positive definite.
pub fn cholesky<T: Scalar>(a: &CMatrix<T>) -> Option<CMatrix<T>> {
    let n = a.nrows();
    let mut l = cmat_zeros::<T>(n);
    for j in 0..n {
        let mut d = a[[j, j]].re;
        for k in 0..j {
            d -= l[[j, k]].norm_sqr();
        }
        if d <= T::zero() || !d.is_finite() {
            return None;
        }
        let dj = d.sqrt();
        l[[j, j]] = Complex::new(dj, T::zero());
        for i in (j + 1)..n {
            let mut s = a[[i, j]];
            for k in 0..j {
                s -= l[[i, k]] * l[[j, k]].conj();
            }
            l[[i, j]] = s / Complex::new(dj, T::zero());
        }
    }
    Some(l)
}

/// Strict positive-definiteness via Cholesky.
pub fn is_pd<T: Scalar>(a: &CMatrix<T>) -> bool {
    cholesky(a).is_some()
}

/// Log-determinant of a PD matrix from its Cholesky factor.
pub fn logdet_from_cholesky<T: Scalar>(l: &CMatrix<T>) -> T {
    let mut acc = T::zero();
    for i in 0..l.nrows() {
        acc += l[[i, i]].re.ln();
    }
    acc + acc
}

/// Inverse of a PD matrix from its Cholesky factor: `X^{-1} = (L^{-1})^H L^{-1}`.
pub fn inverse_from_cholesky<T: Scalar>(l: &CMatrix<T>) -> CMatrix<T> {
    let n = l.nrows();
    // Forward-substitute L Y = I, so Y = L^{-1}.
    let mut y = cmat_zeros::<T>(n);
    for col in 0..n {
        for i in col..n {
            let mut s = if i == col {
                Complex::new(T::one(), T::zero())
            } else {
                czero()
            };
            for k in col..i {
                s -= l[[i, k]] * y[[k, col]];
            }
            y[[i, col]] = s / Complex::new(l[[i, i]].re, T::zero());
        }
    }
    let yh = adjoint(&y);
    yh.dot(&y)
}

/// Eigendecomposition of a Hermitian matrix by cyclic complex Jacobi
/// rotations. Returns eigenvalues in ascending order and the matching
/// eigenvectors as columns, so `A = V diag(w) V^H`.
pub fn eigh<T: Scalar>(a: &CMatrix<T>) -> (Array1<T>, CMatrix<T>) {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "eigh requires a square matrix");
    let mut h = hermitian_part(a);
    let mut v = scaled_identity(n, T::one());
    if n == 1 {
        return (Array1::from_vec(vec![h[[0, 0]].re]), v);
    }

    let scale = frob_norm(&h).max(T::min_positive_value());
    let tol = scale * T::epsilon() * T::of(n as f64);
    let half = T::of(0.5);

    for _sweep in 0..100 {
        let mut off = T::zero();
        for p in 0..n - 1 {
            for q in p + 1..n {
                off += h[[p, q]].norm_sqr();
            }
        }
        if off.sqrt() <= tol {
            break;
        }
        for p in 0..n - 1 {
            for q in p + 1..n {
                let apq = h[[p, q]];
                let r = apq.norm();
                if r <= scale * T::epsilon() {
                    h[[p, q]] = czero();
                    h[[q, p]] = czero();
                    continue;
                }
                // Phase factor making the pivot real, then a real rotation.
                let phase = apq / Complex::new(r, T::zero()); // e^{j phi}
                let app = h[[p, p]].re;
                let aqq = h[[q, q]].re;
                let theta = half * (r + r).atan2(app - aqq);
                let c = theta.cos();
                let s = theta.sin();

                // J[p][p]=c, J[p][q]=-s, J[q][p]=e^{-j phi} s, J[q][q]=e^{-j phi} c
                let e_m = phase.conj(); // e^{-j phi}
                let e_p = phase; // e^{+j phi}
                let cc = Complex::new(c, T::zero());
                let ss = Complex::new(s, T::zero());

                // Columns: col_p' = c col_p + s e^{-j phi} col_q,
                //          col_q' = -s col_p + c e^{-j phi} col_q.
                for i in 0..n {
                    let hip = h[[i, p]];
                    let hiq = h[[i, q]];
                    h[[i, p]] = hip * cc + hiq * e_m * ss;
                    h[[i, q]] = hiq * e_m * cc - hip * ss;
                    let vip = v[[i, p]];
                    let viq = v[[i, q]];
                    v[[i, p]] = vip * cc + viq * e_m * ss;
                    v[[i, q]] = viq * e_m * cc - vip * ss;
                }
                // Rows: row_p' = c row_p + s e^{+j phi} row_q,
                //       row_q' = -s row_p + c e^{+j phi} row_q.
                for i in 0..n {
                    let hpi = h[[p, i]];
                    let hqi = h[[q, i]];
                    h[[p, i]] = hpi * cc + hqi * e_p * ss;
                    h[[q, i]] = hqi * e_p * cc - hpi * ss;
                }
                h[[p, q]] = czero();
                h[[q, p]] = czero();
                h[[p, p]] = Complex::new(h[[p, p]].re, T::zero());
                h[[q, q]] = Complex::new(h[[q, q]].re, T::zero());
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        h[[i, i]]
            .re
            .partial_cmp(&h[[j, j]].re)
            .expect("eigenvalues must be comparable")
    });
    let w = Array1::from_iter(order.iter().map(|&i| h[[i, i]].re));
    let mut vecs = cmat_zeros::<T>(n);
    for (new_col, &old_col) in order.iter().enumerate() {
        for i in 0..n {
            vecs[[i, new_col]] = v[[i, old_col]];
        }
    }
    (w, vecs)
}

pub fn min_eigenvalue<T: Scalar>(a: &CMatrix<T>) -> T {
    eigh(a).0[0]
}

/// PSD square root `A^{1/2}` with negative eigenvalues clamped to zero.
pub fn psd_sqrt<T: Scalar>(a: &CMatrix<T>) -> CMatrix<T> {
    let n = a.nrows();
    let (w, v) = eigh(a);
    let mut out = cmat_zeros::<T>(n);
    for k in 0..n {
        let lam = w[k].max(T::zero()).sqrt();
        if lam == T::zero() {
            continue;
        }
        for i in 0..n {
            for j in 0..n {
                out[[i, j]] += v[[i, k]] * v[[j, k]].conj() * Complex::new(lam, T::zero());
            }
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Packed real parameterization of the Hermitian space.
//
// Coordinates: the N real diagonal entries, then for each p < q the pair
// (sqrt(2) Re X[p][q], sqrt(2) Im X[p][q]). This makes the packed dot product
// equal to `Re tr(A^H B)`, so operator algebra can be done on real vectors.
// ---------------------------------------------------------------------------

pub fn packed_dim(n: usize) -> usize {
    n * n
}

pub fn pack<T: Scalar>(x: &CMatrix<T>) -> Array1<T> {
    let n = x.nrows();
    let sqrt2 = T::of(std::f64::consts::SQRT_2);
    let mut v = Array1::zeros(packed_dim(n));
    let mut idx = 0;
    for p in 0..n {
        v[idx] = x[[p, p]].re;
        idx += 1;
    }
    for p in 0..n {
        for q in p + 1..n {
            v[idx] = sqrt2 * x[[p, q]].re;
            v[idx + 1] = sqrt2 * x[[p, q]].im;
            idx += 2;
        }
    }
    v
}

pub fn unpack<T: Scalar>(v: &[T], n: usize) -> CMatrix<T> {
    assert_eq!(v.len(), packed_dim(n), "packed length mismatch");
    let inv_sqrt2 = T::of(std::f64::consts::FRAC_1_SQRT_2);
    let mut x = cmat_zeros::<T>(n);
    let mut idx = 0;
    for p in 0..n {
        x[[p, p]] = Complex::new(v[idx], T::zero());
        idx += 1;
    }
    for p in 0..n {
        for q in p + 1..n {
            let re = v[idx] * inv_sqrt2;
            let im = v[idx + 1] * inv_sqrt2;
            x[[p, q]] = Complex::new(re, im);
            x[[q, p]] = Complex::new(re, -im);
            idx += 2;
        }
    }
    x
}

/// Matrix of the linear operator `Y -> X Y X` on the packed Hermitian space.
///
/// Built column by column using the rank-two structure of the basis elements,
/// so the cost is O(n^4) rather than O(n^6).
pub fn conjugation_operator_matrix<T: Scalar>(x: &CMatrix<T>) -> Array2<T> {
    let n = x.nrows();
    let dim = packed_dim(n);
    let sqrt2 = T::of(std::f64::consts::SQRT_2);
    let inv_sqrt2 = T::of(std::f64::consts::FRAC_1_SQRT_2);
    let mut op = Array2::zeros((dim, dim));

    let col_of = |p: usize| -> CVector<T> {
        let mut c = Array1::from_elem(n, czero::<T>());
        for i in 0..n {
            c[i] = x[[i, p]];
        }
        c
    };

    let write_packed = |col: usize, m: &CMatrix<T>, op: &mut Array2<T>| {
        let mut idx = 0;
        for p in 0..n {
            op[[idx, col]] = m[[p, p]].re;
            idx += 1;
        }
        for p in 0..n {
            for q in p + 1..n {
                op[[idx, col]] = sqrt2 * m[[p, q]].re;
                op[[idx + 1, col]] = sqrt2 * m[[p, q]].im;
                idx += 2;
            }
        }
    };

    // Diagonal basis elements: E = e_p e_p^H, X E X = x_p x_p^H.
    for p in 0..n {
        let xp = col_of(p);
        let m = outer(&xp, &xp);
        write_packed(p, &m, &mut op);
    }
    // Off-diagonal pairs.
    let mut col = n;
    for p in 0..n {
        for q in p + 1..n {
            let xp = col_of(p);
            let xq = col_of(q);
            let m_pq = outer(&xp, &xq); // X e_p e_q^H X
            let m_qp = adjoint(&m_pq);
            // Real element: (e_p e_q^H + e_q e_p^H)/sqrt(2)
            let mut m_re = cmat_zeros::<T>(n);
            // Imag element: (i e_p e_q^H - i e_q e_p^H)/sqrt(2)
            let mut m_im = cmat_zeros::<T>(n);
            let i_unit = Complex::new(T::zero(), T::one());
            for a in 0..n {
                for b in 0..n {
                    m_re[[a, b]] =
                        (m_pq[[a, b]] + m_qp[[a, b]]) * Complex::new(inv_sqrt2, T::zero());
                    m_im[[a, b]] = (m_pq[[a, b]] - m_qp[[a, b]])
                        * i_unit
                        * Complex::new(inv_sqrt2, T::zero());
                }
            }
            write_packed(col, &m_re, &mut op);
            write_packed(col + 1, &m_im, &mut op);
            col += 2;
        }
    }
    op
}

/// In-place Cholesky solve for a real symmetric positive definite system with
/// multiple right-hand sides. Returns `false` when factorization fails.
pub fn sym_pd_solve<T: Scalar>(a: &mut Array2<T>, rhs: &mut [Array1<T>]) -> bool {
    let n = a.nrows();
    // Factor A = L L^T, storing L in the lower triangle.
    for j in 0..n {
        let mut d = a[[j, j]];
        for k in 0..j {
            d -= a[[j, k]] * a[[j, k]];
        }
        if d <= T::zero() || !d.is_finite() {
            return false;
        }
        let dj = d.sqrt();
        a[[j, j]] = dj;
        for i in (j + 1)..n {
            let mut s = a[[i, j]];
            for k in 0..j {
                s -= a[[i, k]] * a[[j, k]];
            }
            a[[i, j]] = s / dj;
        }
    }
    for b in rhs.iter_mut() {
        // Forward substitution L y = b.
        for i in 0..n {
            let mut s = b[i];
            for k in 0..i {
                s -= a[[i, k]] * b[k];
            }
            b[i] = s / a[[i, i]];
        }
        // Back substitution L^T x = y.
        for i in (0..n).rev() {
            let mut s = b[i];
            for k in (i + 1)..n {
                s -= a[[k, i]] * b[k];
            }
            b[i] = s / a[[i, i]];
        }
    }
    true
}

/// One standard normal sample via Box-Muller on the generator's uniform
/// stream (deterministic for a seeded generator).
pub fn standard_normal<T: Scalar, R: Rng>(rng: &mut R) -> T {
    let u1: f64 = rng.gen::<f64>().max(1e-300);
    let u2: f64 = rng.gen::<f64>();
    let z = (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos();
    T::of(z)
}

/// Circularly symmetric complex Gaussian vector with unit variance per entry.
pub fn complex_gaussian_vector<T: Scalar, R: Rng>(rng: &mut R, n: usize) -> CVector<T> {
    let scale = T::of(std::f64::consts::FRAC_1_SQRT_2);
    Array1::from_iter((0..n).map(|_| {
        let re: T = standard_normal(rng);
        let im: T = standard_normal(rng);
        Complex::new(re * scale, im * scale)
    }))
}
