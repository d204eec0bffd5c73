//! Coefficient bundles (F, γ, σ, X) for the underdamped system and its limit.

use std::fmt;
use std::sync::Arc;

use nalgebra::SMatrix;

use crate::domain::DomainSpec;
use crate::error::{Error, Result};
use crate::linalg::{Matrix, Vector};
use crate::lyapunov::{self, DiffusionMatrix, FrictionMatrix};
use crate::lyapunov_check::LyapunovCandidate;

mod builtin;
mod spec;

pub use builtin::{
    builtin_diffusion_dlvo, builtin_diffusion_model1, builtin_diffusion_pore, ConstantBenchmark,
    DlvoPair, ExplosiveToy, RotationalPore, WallGravity,
};
pub use spec::{AnyModel, ModelSpec, BUILTIN_NAMES};

pub type VectorField<const N: usize> = Arc<dyn Fn(&Vector<N>) -> Vector<N> + Send + Sync>;
pub type MatrixField<const N: usize> = Arc<dyn Fn(&Vector<N>) -> Matrix<N> + Send + Sync>;
pub type NoiseField<const N: usize, const K: usize> =
    Arc<dyn Fn(&Vector<N>) -> SMatrix<f64, N, K> + Send + Sync>;
pub type TensorField<const N: usize> = Arc<dyn Fn(&Vector<N>) -> [Matrix<N>; N] + Send + Sync>;
pub type ScalarField<const N: usize> = Arc<dyn Fn(&Vector<N>) -> f64 + Send + Sync>;
type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Coefficients of `dx = v dt, m dv = (F − γv) dt + σ dB` on an open domain X ⊂ Rⁿ,
/// driven by a k-dimensional Brownian motion.
#[derive(Clone)]
pub struct Model<const N: usize, const K: usize> {
    name: String,
    domain: DomainSpec,
    force: VectorField<N>,
    friction: MatrixField<N>,
    diffusion: NoiseField<N, K>,
    friction_grad: Option<TensorField<N>>,
    lyapunov: Option<LyapunovCandidate<N>>,
    reference_noise_drift: Option<VectorField<N>>,
}

impl<const N: usize, const K: usize> fmt::Debug for Model<N, K> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Model")
            .field("name", &self.name)
            .field("n", &N)
            .field("k", &K)
            .field("domain", &self.domain)
            .field("analytic_friction_grad", &self.friction_grad.is_some())
            .field("lyapunov", &self.lyapunov.is_some())
            .finish()
    }
}

impl<const N: usize, const K: usize> Model<N, K> {
    pub fn new(
        name: impl Into<String>,
        domain: DomainSpec,
        force: VectorField<N>,
        friction: MatrixField<N>,
        diffusion: NoiseField<N, K>,
    ) -> Result<Self> {
        if let Some(dim) = domain.required_dim() {
            if dim != N {
                return Err(Error::DimensionMismatch { expected: dim, got: N });
            }
        }
        Ok(Self {
            name: name.into(),
            domain,
            force,
            friction,
            diffusion,
            friction_grad: None,
            lyapunov: None,
            reference_noise_drift: None,
        })
    }

    /// Analytic ∂_{x_l} γ, as `[∂_0 γ, …, ∂_{n−1} γ]`.
    pub fn with_friction_grad(mut self, grad: TensorField<N>) -> Self {
        self.friction_grad = Some(grad);
        self
    }

    pub fn with_lyapunov(mut self, candidate: LyapunovCandidate<N>) -> Self {
        self.lyapunov = Some(candidate);
        self
    }

    /// Closed-form noise-induced drift, kept only for cross-checking the generic pipeline.
    pub fn with_reference_noise_drift(mut self, s: VectorField<N>) -> Self {
        self.reference_noise_drift = Some(s);
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn domain(&self) -> &DomainSpec {
        &self.domain
    }

    pub fn force(&self, x: &Vector<N>) -> Vector<N> {
        (self.force)(x)
    }

    pub fn friction_raw(&self, x: &Vector<N>) -> Matrix<N> {
        (self.friction)(x)
    }

    pub fn friction(&self, x: &Vector<N>) -> Result<FrictionMatrix<N>> {
        FrictionMatrix::new((self.friction)(x))
    }

    pub fn diffusion(&self, x: &Vector<N>) -> Result<DiffusionMatrix<N, K>> {
        DiffusionMatrix::new((self.diffusion)(x))
    }

    pub fn friction_grad(&self, x: &Vector<N>) -> Option<[Matrix<N>; N]> {
        self.friction_grad.as_ref().map(|g| g(x))
    }

    pub fn has_analytic_friction_grad(&self) -> bool {
        self.friction_grad.is_some()
    }

    /// Same coefficients with the analytic friction gradient dropped, forcing the
    /// finite-difference path.
    pub fn without_friction_grad(&self) -> Self {
        let mut m = self.clone();
        m.friction_grad = None;
        m
    }

    pub fn lyapunov_candidate(&self) -> Option<&LyapunovCandidate<N>> {
        self.lyapunov.as_ref()
    }

    pub fn reference_noise_drift(&self, x: &Vector<N>) -> Option<Vector<N>> {
        self.reference_noise_drift.as_ref().map(|s| s(x))
    }
}

/// A scalar diffusion-coefficient shape D with its first two derivatives.
#[derive(Clone)]
pub struct ScalarProfile {
    value: ScalarFn,
    first: ScalarFn,
    second: ScalarFn,
}

impl fmt::Debug for ScalarProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("ScalarProfile")
    }
}

impl ScalarProfile {
    pub fn new(
        value: impl Fn(f64) -> f64 + Send + Sync + 'static,
        first: impl Fn(f64) -> f64 + Send + Sync + 'static,
        second: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            value: Arc::new(value),
            first: Arc::new(first),
            second: Arc::new(second),
        }
    }

    pub fn d(&self, s: f64) -> f64 {
        (self.value)(s)
    }

    pub fn d_prime(&self, s: f64) -> f64 {
        (self.first)(s)
    }

    pub fn d_second(&self, s: f64) -> f64 {
        (self.second)(s)
    }
}

/// Position-dependent diffusion coefficient D(x) > 0 with gradient, at temperature k_BT.
#[derive(Clone)]
pub struct DiffusionProfile<const N: usize> {
    value: ScalarField<N>,
    gradient: VectorField<N>,
    kbt: f64,
}

impl<const N: usize> DiffusionProfile<N> {
    pub fn new(value: ScalarField<N>, gradient: VectorField<N>, kbt: f64) -> Result<Self> {
        crate::error::require_positive("kBT", kbt)?;
        Ok(Self {
            value,
            gradient,
            kbt,
        })
    }

    /// D(x) = shape(reduce(x)), with ∇D by the chain rule.
    pub fn composed(
        shape: ScalarProfile,
        reduce: impl Fn(&Vector<N>) -> f64 + Send + Sync + 'static,
        reduce_grad: impl Fn(&Vector<N>) -> Vector<N> + Send + Sync + 'static,
        kbt: f64,
    ) -> Result<Self> {
        let reduce = Arc::new(reduce);
        let r2 = Arc::clone(&reduce);
        let s2 = shape.clone();
        Self::new(
            Arc::new(move |x| shape.d(reduce(x))),
            Arc::new(move |x| reduce_grad(x) * s2.d_prime(r2(x))),
            kbt,
        )
    }

    pub fn d(&self, x: &Vector<N>) -> f64 {
        (self.value)(x)
    }

    pub fn grad(&self, x: &Vector<N>) -> Vector<N> {
        (self.gradient)(x)
    }

    pub fn kbt(&self) -> f64 {
        self.kbt
    }
}

/// γ(x) = (k_BT/D(x))·I and σ(x) = √(2(k_BT)²/D(x))·I, so that σσᵀ = 2k_BT·γ.
///
/// Fails with [`Error::DomainMismatch`] if D is not finite and positive on a probe
/// grid of the domain.
pub fn from_fluctuation_dissipation<const N: usize>(
    name: impl Into<String>,
    profile: DiffusionProfile<N>,
    force: VectorField<N>,
    domain: DomainSpec,
) -> Result<Model<N, N>> {
    for x in domain.grid_points::<N>(200) {
        let d = profile.d(&x);
        if !(d > 0.0 && d.is_finite()) {
            return Err(Error::DomainMismatch(format!(
                "D({:?}) = {d}",
                x.as_slice()
            )));
        }
    }
    let kbt = profile.kbt();
    let (p1, p2, p3, p4) = (
        profile.clone(),
        profile.clone(),
        profile.clone(),
        profile.clone(),
    );
    let friction: MatrixField<N> = Arc::new(move |x| Matrix::<N>::identity() * (kbt / p1.d(x)));
    let diffusion: NoiseField<N, N> =
        Arc::new(move |x| Matrix::<N>::identity() * (2.0 * kbt * kbt / p2.d(x)).sqrt());
    let grad: TensorField<N> = Arc::new(move |x| {
        let d = p3.d(x);
        let g = p3.grad(x);
        // ∂_l (k_BT / D) = −k_BT ∂_l D / D²
        std::array::from_fn(|l| Matrix::<N>::identity() * (-kbt * g[l] / (d * d)))
    });
    // S = ∇D for this family
    let reference: VectorField<N> = Arc::new(move |x| p4.grad(x));
    Ok(Model::new(name, domain, force, friction, diffusion)?
        .with_friction_grad(grad)
        .with_reference_noise_drift(reference))
}

/// Drift, diffusion and noise-induced drift of the limiting equation at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LimitingCoefficients<const N: usize, const K: usize> {
    /// γ⁻¹F + S
    pub drift: Vector<N>,
    /// γ⁻¹σ
    pub diffusion: SMatrix<f64, N, K>,
    pub noise_drift: Vector<N>,
}

pub fn limiting_coefficients<const N: usize, const K: usize>(
    model: &Model<N, K>,
    x: &Vector<N>,
) -> Result<LimitingCoefficients<N, K>> {
    let gamma = model.friction(x)?;
    let sigma = model.diffusion(x)?;
    let inv = lyapunov::friction_inverse(&gamma)?;
    let grad = lyapunov::grad_friction_inverse_with(model, x, &inv, None)?;
    let sol = lyapunov::solve_lyapunov(&gamma, &sigma.sigma_sq())?;
    let s = lyapunov::contract_drift(&grad, &sol.j);
    Ok(LimitingCoefficients {
        drift: inv * model.force(x) + s,
        diffusion: inv * sigma.as_matrix(),
        noise_drift: s,
    })
}

/// γ⁻¹(x)F(x) + S(x)
pub fn limiting_drift<const N: usize, const K: usize>(
    model: &Model<N, K>,
    x: &Vector<N>,
) -> Result<Vector<N>> {
    Ok(limiting_coefficients(model, x)?.drift)
}

/// γ⁻¹(x)σ(x)
pub fn limiting_diffusion<const N: usize, const K: usize>(
    model: &Model<N, K>,
    x: &Vector<N>,
) -> Result<SMatrix<f64, N, K>> {
    let gamma = model.friction(x)?;
    let sigma = model.diffusion(x)?;
    Ok(lyapunov::friction_inverse(&gamma)? * sigma.as_matrix())
}
