//! Matrix Lyapunov equation for the limiting diffusion and the noise-induced drift
//!
//! The small-mass limit of `m dv = (F − γ v) dt + σ dB` carries an extra drift
//!
//! ```text
//! S_i(x) = Σ_{j,l} ∂_{x_l}[γ⁻¹]_{ij}(x) · J_{jl}(x),      γ J + J γᵀ = σ σᵀ
//! ```
//!
//! where `J` is the unique positive semidefinite solution whenever the symmetric
//! part of `γ` is positive-definite. It also equals
//! `∫₀^∞ exp(−tγ) σσᵀ exp(−tγᵀ) dt`, which [`integral_lyapunov`] evaluates as an
//! independent cross-check of [`solve_lyapunov`].

use nalgebra::SMatrix;

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix, Vector, MAX_DIM};
use crate::models::Model;

/// Friction matrix γ(x) whose symmetric part is positive-definite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrictionMatrix<const N: usize>(Matrix<N>);

impl<const N: usize> FrictionMatrix<N> {
    pub fn new(entries: Matrix<N>) -> Result<Self> {
        if entries.iter().all(|v| v.is_finite()) && linalg::sym_part_positive_definite(&entries) {
            Ok(Self(entries))
        } else {
            let min_eigenvalue = if entries.iter().all(|v| v.is_finite()) {
                linalg::min_sym_eigenvalue(&entries)
            } else {
                f64::NAN
            };
            Err(Error::NotPositiveDefinite { min_eigenvalue })
        }
    }

    pub fn as_matrix(&self) -> &Matrix<N> {
        &self.0
    }

    /// True if γ = c·I for some scalar c.
    pub fn is_isotropic(&self) -> bool {
        let c = self.0[(0, 0)];
        linalg::is_diagonal(&self.0) && (0..N).all(|i| self.0[(i, i)] == c)
    }
}

/// Noise coefficient σ(x), an n×k matrix with finite entries.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiffusionMatrix<const N: usize, const K: usize>(SMatrix<f64, N, K>);

impl<const N: usize, const K: usize> DiffusionMatrix<N, K> {
    pub fn new(entries: SMatrix<f64, N, K>) -> Result<Self> {
        if entries.iter().all(|v| v.is_finite()) {
            Ok(Self(entries))
        } else {
            Err(Error::DomainError("diffusion matrix has non-finite entries".into()))
        }
    }

    pub fn as_matrix(&self) -> &SMatrix<f64, N, K> {
        &self.0
    }

    /// σσᵀ
    pub fn sigma_sq(&self) -> Matrix<N> {
        self.0 * self.0.transpose()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LyapunovSolution<const N: usize> {
    pub j: Matrix<N>,
    /// Frobenius norm of γJ + Jγᵀ − σσᵀ.
    pub residual_norm: f64,
}

fn residual<const N: usize>(gamma: &Matrix<N>, j: &Matrix<N>, sigma_sq: &Matrix<N>) -> f64 {
    (gamma * j + j * gamma.transpose() - sigma_sq).norm()
}

/// Solves γJ + Jγᵀ = σσᵀ by vectorization: (I⊗γ + γ⊗I) vec(J) = vec(σσᵀ).
pub fn solve_lyapunov<const N: usize>(
    gamma: &FrictionMatrix<N>,
    sigma_sq: &Matrix<N>,
) -> Result<LyapunovSolution<N>> {
    const { assert!(N >= 1 && N <= MAX_DIM) };
    let g = gamma.as_matrix();
    let dim = N * N;
    let mut kron = [0.0; MAX_DIM * MAX_DIM * MAX_DIM * MAX_DIM];
    let mut rhs = [0.0; MAX_DIM * MAX_DIM];
    // column-major vec: (i, j) -> i + j n
    let idx = |i: usize, j: usize| i + j * N;
    for j in 0..N {
        for i in 0..N {
            let row = idx(i, j);
            rhs[row] = sigma_sq[(i, j)];
            for p in 0..N {
                kron[row * dim + idx(p, j)] += g[(i, p)];
                kron[row * dim + idx(i, p)] += g[(j, p)];
            }
        }
    }
    linalg::solve_dense_in_place(&mut kron[..dim * dim], &mut rhs[..dim], dim)?;
    let j = Matrix::<N>::from_fn(|r, c| rhs[idx(r, c)]);
    Ok(LyapunovSolution {
        j,
        residual_norm: residual(g, &j, sigma_sq),
    })
}

/// J = ∫₀^T exp(−tγ) σσᵀ exp(−tγᵀ) dt by composite Simpson quadrature.
///
/// Used as an oracle for [`solve_lyapunov`]; `horizon` must be long enough that
/// `‖exp(−Tγ)‖₂ < 1e-12`.
pub fn integral_lyapunov<const N: usize>(
    gamma: &FrictionMatrix<N>,
    sigma_sq: &Matrix<N>,
    horizon: f64,
    step: f64,
) -> Result<LyapunovSolution<N>> {
    crate::error::require_positive("horizon", horizon)?;
    crate::error::require_positive("step", step)?;
    let g = gamma.as_matrix();
    let tail = linalg::expm(&(-g * horizon)).norm();
    if tail >= 1e-12 {
        return Err(Error::HorizonTooShort { tail });
    }
    let mut intervals = (horizon / step).ceil() as usize;
    if intervals % 2 == 1 {
        intervals += 1;
    }
    let h = horizon / intervals as f64;
    let propagator = linalg::expm(&(-g * h));
    let mut e = Matrix::<N>::identity();
    let mut acc = Matrix::<N>::zeros();
    for i in 0..=intervals {
        let weight = if i == 0 || i == intervals {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        };
        acc += (e * sigma_sq * e.transpose()) * weight;
        e = propagator * e;
    }
    let j = acc * (h / 3.0);
    Ok(LyapunovSolution {
        j,
        residual_norm: residual(g, &j, sigma_sq),
    })
}

/// γ⁻¹, rejecting matrices whose 1-norm condition number exceeds 1e14.
pub fn friction_inverse<const N: usize>(gamma: &FrictionMatrix<N>) -> Result<Matrix<N>> {
    let g = gamma.as_matrix();
    if N == 1 {
        return Ok(Matrix::<N>::from_element(1.0 / g[(0, 0)]));
    }
    if linalg::is_diagonal(g) {
        let inv = Matrix::<N>::from_fn(|i, j| if i == j { 1.0 / g[(i, i)] } else { 0.0 });
        let (lo, hi) = (0..N).fold((f64::INFINITY, 0.0_f64), |(lo, hi), i| {
            (lo.min(g[(i, i)].abs()), hi.max(g[(i, i)].abs()))
        });
        if hi / lo > 1e14 {
            return Err(Error::SingularSystem(format!("condition number {:e}", hi / lo)));
        }
        return Ok(inv);
    }
    let inv = g
        .try_inverse()
        .ok_or_else(|| Error::SingularSystem("friction matrix is not invertible".into()))?;
    let cond = g.abs().column_sum().max() * inv.abs().column_sum().max();
    if !(cond <= 1e14) {
        return Err(Error::SingularSystem(format!("condition number {cond:e}")));
    }
    Ok(inv)
}

/// Default central-difference step, 1e-5·(1 + |x|).
pub fn default_fd_step<const N: usize>(x: &Vector<N>) -> f64 {
    1e-5 * (1.0 + x.norm())
}

/// ∂_{x_l} γ⁻¹ for l = 0..n, returned as `[∂_0 γ⁻¹, …, ∂_{n−1} γ⁻¹]`.
///
/// Models with an analytic friction gradient use −γ⁻¹ (∂_l γ) γ⁻¹; otherwise γ⁻¹
/// is differenced centrally with step `h` (default [`default_fd_step`]).
pub fn grad_friction_inverse<const N: usize, const K: usize>(
    model: &Model<N, K>,
    x: &Vector<N>,
    h: Option<f64>,
) -> Result<[Matrix<N>; N]> {
    let gamma = model.friction(x)?;
    let inv = friction_inverse(&gamma)?;
    grad_friction_inverse_with(model, x, &inv, h)
}

pub(crate) fn grad_friction_inverse_with<const N: usize, const K: usize>(
    model: &Model<N, K>,
    x: &Vector<N>,
    inv: &Matrix<N>,
    h: Option<f64>,
) -> Result<[Matrix<N>; N]> {
    if let Some(dgamma) = model.friction_grad(x) {
        return Ok(std::array::from_fn(|l| -(inv * dgamma[l] * inv)));
    }
    finite_difference_grad(model, x, h.unwrap_or_else(|| default_fd_step(x)))
}

/// Central differences of γ⁻¹, ignoring any analytic gradient the model carries.
pub fn finite_difference_grad<const N: usize, const K: usize>(
    model: &Model<N, K>,
    x: &Vector<N>,
    h: f64,
) -> Result<[Matrix<N>; N]> {
    crate::error::require_positive("h", h)?;
    let margin = model.domain().boundary_distance(x.as_slice());
    if margin <= h {
        return Err(Error::BoundaryTooClose { margin, step: h });
    }
    let mut out = [Matrix::<N>::zeros(); N];
    for (l, slot) in out.iter_mut().enumerate() {
        let mut plus = *x;
        let mut minus = *x;
        plus[l] += h;
        minus[l] -= h;
        let up = friction_inverse(&model.friction(&plus)?)?;
        let down = friction_inverse(&model.friction(&minus)?)?;
        *slot = (up - down) / (2.0 * h);
    }
    Ok(out)
}

/// S_i = Σ_{j,l} (∂_l γ⁻¹)_{ij} J_{jl}.
pub fn contract_drift<const N: usize>(grad_inv: &[Matrix<N>; N], j: &Matrix<N>) -> Vector<N> {
    Vector::<N>::from_fn(|i, _| {
        let mut s = 0.0;
        for (l, g) in grad_inv.iter().enumerate() {
            for jj in 0..N {
                s += g[(i, jj)] * j[(jj, l)];
            }
        }
        s
    })
}

/// Noise-induced drift S(x) of the limiting equation.
pub fn noise_induced_drift<const N: usize, const K: usize>(
    model: &Model<N, K>,
    x: &Vector<N>,
) -> Result<Vector<N>> {
    let gamma = model.friction(x)?;
    let sigma = model.diffusion(x)?;
    let inv = friction_inverse(&gamma)?;
    let grad = grad_friction_inverse_with(model, x, &inv, None)?;
    let sol = solve_lyapunov(&gamma, &sigma.sigma_sq())?;
    Ok(contract_drift(&grad, &sol.j))
}
