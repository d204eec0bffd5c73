//! Small dense linear algebra on statically sized matrices (n ≤ 4).

use nalgebra::{Cholesky, DMatrix, SMatrix, SVector, SymmetricEigen};

use crate::error::{Error, Result};

pub type Vector<const N: usize> = SVector<f64, N>;
pub type Matrix<const N: usize> = SMatrix<f64, N, N>;

/// Largest state dimension supported by the stack-allocated solvers.
pub const MAX_DIM: usize = 4;

// Padé(6,6) numerator coefficients c_j = (2q-j)! q! / ((2q)! j! (q-j)!), q = 6.
const PADE6: [f64; 7] = [
    1.0,
    1.0 / 2.0,
    5.0 / 44.0,
    1.0 / 66.0,
    1.0 / 792.0,
    1.0 / 15840.0,
    1.0 / 665280.0,
];

pub fn is_diagonal<const N: usize>(m: &Matrix<N>) -> bool {
    for j in 0..N {
        for i in 0..N {
            if i != j && m[(i, j)] != 0.0 {
                return false;
            }
        }
    }
    true
}

/// Matrix exponential by scaling and squaring with a diagonal Padé(6,6) approximant.
///
/// Diagonal inputs (including every 1×1 matrix) are exponentiated entrywise.
pub fn expm<const N: usize>(a: &Matrix<N>) -> Matrix<N> {
    if is_diagonal(a) {
        return Matrix::<N>::from_fn(|i, j| if i == j { a[(i, i)].exp() } else { 0.0 });
    }
    let norm = a.abs().column_sum().max();
    // ||A / 2^s||_1 <= 1/2 keeps the truncation error below double precision
    let s = if norm > 0.5 {
        (norm / 0.5).log2().ceil() as i32
    } else {
        0
    };
    let scaled = a / 2f64.powi(s);

    let ident = Matrix::<N>::identity();
    let mut power = ident;
    let mut num = ident * PADE6[0];
    let mut den = ident * PADE6[0];
    for (j, c) in PADE6.iter().enumerate().skip(1) {
        power *= scaled;
        num += power * *c;
        if j % 2 == 0 {
            den += power * *c;
        } else {
            den -= power * *c;
        }
    }
    let mut e = solve_matrix(&den, &num).expect("Padé denominator is nonsingular for ||A|| <= 1/2");
    for _ in 0..s {
        e = e * e;
    }
    e
}

/// Smallest eigenvalue of the symmetric part (M + Mᵀ)/2.
pub fn min_sym_eigenvalue<const N: usize>(m: &Matrix<N>) -> f64 {
    let sym = (m + m.transpose()) * 0.5;
    SymmetricEigen::new(dynamic(&sym)).eigenvalues.min()
}

// nalgebra's eigen-decomposition is not available for generic const dimensions
fn dynamic<const N: usize>(m: &Matrix<N>) -> DMatrix<f64> {
    DMatrix::from_column_slice(N, N, m.as_slice())
}

/// Solves A X = B column by column.
pub fn solve_matrix<const N: usize>(a: &Matrix<N>, b: &Matrix<N>) -> Result<Matrix<N>> {
    let mut x = Matrix::<N>::zeros();
    let mut rows = [0.0; MAX_DIM * MAX_DIM];
    let mut rhs = [0.0; MAX_DIM];
    assert!(N <= MAX_DIM);
    for c in 0..N {
        for i in 0..N {
            for j in 0..N {
                rows[i * N + j] = a[(i, j)];
            }
            rhs[i] = b[(i, c)];
        }
        solve_dense_in_place(&mut rows[..N * N], &mut rhs[..N], N)?;
        for i in 0..N {
            x[(i, c)] = rhs[i];
        }
    }
    Ok(x)
}

/// True if the symmetric part of `m` is positive-definite.
pub fn sym_part_positive_definite<const N: usize>(m: &Matrix<N>) -> bool {
    if N == 1 {
        return m[(0, 0)] > 0.0;
    }
    let sym = (m + m.transpose()) * 0.5;
    Cholesky::new(sym).is_some()
}

fn psd_power<const N: usize>(m: &Matrix<N>, f: impl Fn(f64) -> f64) -> Matrix<N> {
    let sym = (m + m.transpose()) * 0.5;
    if is_diagonal(&sym) {
        return Matrix::<N>::from_fn(|i, j| if i == j { f(sym[(i, i)]) } else { 0.0 });
    }
    let eig = SymmetricEigen::new(dynamic(&sym));
    let d = eig.eigenvalues.map(f);
    let r = &eig.eigenvectors * DMatrix::from_diagonal(&d) * eig.eigenvectors.transpose();
    Matrix::<N>::from_column_slice(r.as_slice())
}

/// Symmetric square root of a positive semidefinite matrix; negative rounding
/// noise in the spectrum is clamped to zero.
pub fn psd_sqrt<const N: usize>(m: &Matrix<N>) -> Matrix<N> {
    psd_power(m, |l| l.max(0.0).sqrt())
}

/// Symmetric Moore–Penrose inverse square root of a positive semidefinite matrix.
pub fn psd_pinv_sqrt<const N: usize>(m: &Matrix<N>) -> Matrix<N> {
    let scale = m.abs().max();
    let cutoff = scale * 1e-14;
    psd_power(m, move |l| if l > cutoff { 1.0 / l.sqrt() } else { 0.0 })
}

/// In-place Gaussian elimination with partial pivoting on a row-major `dim × dim`
/// system. On success `rhs` holds the solution.
pub(crate) fn solve_dense_in_place(a: &mut [f64], rhs: &mut [f64], dim: usize) -> Result<()> {
    debug_assert!(a.len() >= dim * dim && rhs.len() >= dim);
    let scale = a[..dim * dim].iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
    if scale == 0.0 || !scale.is_finite() {
        return Err(Error::SingularSystem(format!("coefficient scale {scale}")));
    }
    let tiny = scale * 1e-14;
    for col in 0..dim {
        let mut pivot_row = col;
        let mut pivot_abs = a[col * dim + col].abs();
        for row in col + 1..dim {
            let v = a[row * dim + col].abs();
            if v > pivot_abs {
                pivot_abs = v;
                pivot_row = row;
            }
        }
        if pivot_abs <= tiny {
            return Err(Error::SingularSystem(format!(
                "pivot {pivot_abs:e} in column {col} (scale {scale:e})"
            )));
        }
        if pivot_row != col {
            for j in 0..dim {
                a.swap(col * dim + j, pivot_row * dim + j);
            }
            rhs.swap(col, pivot_row);
        }
        let pivot = a[col * dim + col];
        for row in col + 1..dim {
            let factor = a[row * dim + col] / pivot;
            if factor == 0.0 {
                continue;
            }
            for j in col..dim {
                a[row * dim + j] -= factor * a[col * dim + j];
            }
            rhs[row] -= factor * rhs[col];
        }
    }
    for row in (0..dim).rev() {
        let mut acc = rhs[row];
        for j in row + 1..dim {
            acc -= a[row * dim + j] * rhs[j];
        }
        rhs[row] = acc / a[row * dim + row];
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::{Matrix2, Matrix3};

    #[test]
    fn expm_matches_nalgebra_on_nonnormal_input() {
        let a = Matrix3::new(-1.0, 2.0, 0.5, 0.0, -3.0, 1.0, 0.2, 0.0, -0.5);
        for scale in [0.01, 0.3, 1.0, 7.0, 40.0] {
            let m = a * scale;
            assert_relative_eq!(expm(&m), m.exp(), max_relative = 1e-11, epsilon = 1e-14);
        }
    }

    #[test]
    fn expm_of_nilpotent_is_exact() {
        let a = Matrix2::new(0.0, 3.0, 0.0, 0.0);
        assert_relative_eq!(expm(&a), Matrix2::new(1.0, 3.0, 0.0, 1.0), epsilon = 1e-15);
    }

    #[test]
    fn expm_diagonal_fast_path() {
        let a = Matrix2::new(-2.0, 0.0, 0.0, 0.5);
        let e = expm(&a);
        assert_eq!(e[(0, 0)], (-2.0f64).exp());
        assert_eq!(e[(1, 1)], 0.5f64.exp());
        assert_eq!(e[(0, 1)], 0.0);
    }

    #[test]
    fn psd_sqrt_squares_back() {
        let m = Matrix2::new(4.0, 1.0, 1.0, 3.0);
        let r = psd_sqrt(&m);
        assert_relative_eq!(r * r, m, epsilon = 1e-12);
        let p = psd_pinv_sqrt(&m);
        assert_relative_eq!(p * m * p, Matrix2::identity(), epsilon = 1e-12);
    }

    #[test]
    fn pinv_sqrt_of_rank_deficient() {
        let m = Matrix2::new(1.0, 1.0, 1.0, 1.0);
        let p = psd_pinv_sqrt(&m);
        // projector onto span{(1,1)}
        assert_relative_eq!(psd_sqrt(&m) * p, Matrix2::new(0.5, 0.5, 0.5, 0.5), epsilon = 1e-12);
    }

    #[test]
    fn dense_solve_and_singular_detection() {
        let mut a = [2.0, 1.0, 1.0, 3.0];
        let mut b = [3.0, 5.0];
        solve_dense_in_place(&mut a, &mut b, 2).unwrap();
        assert_relative_eq!(b[0], 0.8, epsilon = 1e-15);
        assert_relative_eq!(b[1], 1.4, epsilon = 1e-15);

        let mut s = [1.0, 2.0, 2.0, 4.0];
        let mut r = [1.0, 1.0];
        assert!(matches!(
            solve_dense_in_place(&mut s, &mut r, 2),
            Err(Error::SingularSystem(_))
        ));
    }
}
