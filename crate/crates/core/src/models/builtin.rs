//! The physical systems (a particle between charged walls under gravity, a DLVO
//! pair in a shallow trap, a particle in a rotating pore) and two benchmarks.

use std::f64::consts::PI;
use std::sync::Arc;

use log::warn;
use serde::{Deserialize, Serialize};

use super::{from_fluctuation_dissipation, DiffusionProfile, Model, ScalarProfile};
use crate::domain::DomainSpec;
use crate::error::{require_positive, Error, Result};
use crate::linalg::{Matrix, Vector};
use crate::lyapunov_check::LyapunovCandidate;

/// D(x) = D_max·sin(π(x−a)/(b−a)) on [a, b].
///
/// Vanishes at both walls, increases strictly on [a, (a+b)/2), decreases strictly
/// on ((a+b)/2, b], and peaks at D_max in the middle.
pub fn builtin_diffusion_model1(a: f64, b: f64, d_max: f64) -> Result<ScalarProfile> {
    if !(a < b) {
        return Err(Error::ParameterDomain {
            name: "b",
            value: b,
            reason: "profile requires a < b",
        });
    }
    require_positive("d_max", d_max)?;
    let w = PI / (b - a);
    Ok(ScalarProfile::new(
        move |x| d_max * (w * (x - a)).sin(),
        move |x| d_max * w * (w * (x - a)).cos(),
        move |x| -d_max * w * w * (w * (x - a)).sin(),
    ))
}

/// D(d) = D_SE·(1 − e^{−αd}): D(0) = 0, D′ > 0, D″ < 0, D → D_SE.
pub fn builtin_diffusion_dlvo(d_se: f64, alpha: f64) -> Result<ScalarProfile> {
    require_positive("d_se", d_se)?;
    require_positive("alpha", alpha)?;
    Ok(ScalarProfile::new(
        move |d| d_se * (1.0 - (-alpha * d).exp()),
        move |d| d_se * alpha * (-alpha * d).exp(),
        move |d| -d_se * alpha * alpha * (-alpha * d).exp(),
    ))
}

/// 𝒟(s) = D₀(1 − s/C²)(1 + βs/C²) in s = r², with 0 < β < 1 so that
/// 𝒟(C²) = 0, 𝒟′ < 0 and 𝒟″ = −2βD₀/C⁴ < 0 on [0, C²].
pub fn builtin_diffusion_pore(c_radius: f64, d0: f64, beta: f64) -> Result<ScalarProfile> {
    require_positive("c_radius", c_radius)?;
    require_positive("d0", d0)?;
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::ParameterDomain {
            name: "beta",
            value: beta,
            reason: "must lie in (0, 1)",
        });
    }
    let c2 = c_radius * c_radius;
    Ok(ScalarProfile::new(
        move |s| d0 * (1.0 - s / c2) * (1.0 + beta * s / c2),
        move |s| d0 / c2 * (beta - 1.0 - 2.0 * beta * s / c2),
        move |_| -2.0 * beta * d0 / (c2 * c2),
    ))
}

fn v1(x: f64) -> Vector<1> {
    Vector::<1>::new(x)
}

/// Vertical position of a colloid between two charged walls at `a` and `b`, under
/// effective gravity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WallGravity {
    pub a: f64,
    pub b: f64,
    /// Double-layer prefactor B.
    pub big_b: f64,
    /// Inverse Debye length κ.
    pub kappa: f64,
    /// Soft-wall decay λ (expected λ ≫ κ).
    pub lambda: f64,
    pub g_eff: f64,
    pub kbt: f64,
    pub d_max: f64,
}

impl Default for WallGravity {
    fn default() -> Self {
        Self {
            a: 0.0,
            b: 1.0,
            big_b: 5.0,
            kappa: 10.0,
            lambda: 100.0,
            g_eff: 1.0,
            kbt: 1.0,
            d_max: 1.0,
        }
    }
}

impl WallGravity {
    pub fn validate(&self) -> Result<()> {
        DomainSpec::interval(self.a, self.b)?;
        require_positive("B", self.big_b)?;
        require_positive("kappa", self.kappa)?;
        require_positive("lambda", self.lambda)?;
        require_positive("kBT", self.kbt)?;
        require_positive("d_max", self.d_max)?;
        if !self.g_eff.is_finite() {
            return Err(Error::ParameterDomain {
                name: "g_eff",
                value: self.g_eff,
                reason: "must be finite",
            });
        }
        if self.lambda < 10.0 * self.kappa {
            warn!(
                "soft-wall decay lambda = {} is not much larger than kappa = {}",
                self.lambda, self.kappa
            );
        }
        Ok(())
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.a + self.b)
    }

    /// U(x): two double-layer terms, gravity, and two soft walls.
    pub fn potential(&self, x: f64) -> f64 {
        let (u, w) = (x - self.a, self.b - x);
        let bk = self.big_b / self.kappa;
        bk * (-self.kappa * u).exp()
            + bk * (-self.kappa * w).exp()
            + self.g_eff * x
            + (-self.lambda * u).exp() / u
            + (-self.lambda * w).exp() / w
    }

    pub fn potential_d1(&self, x: f64) -> f64 {
        let (u, w, l) = (x - self.a, self.b - x, self.lambda);
        let (eu, ew) = ((-l * u).exp(), (-l * w).exp());
        -self.big_b * (-self.kappa * u).exp() + self.big_b * (-self.kappa * w).exp() + self.g_eff
            - eu * (l / u + 1.0 / (u * u))
            + ew * (l / w + 1.0 / (w * w))
    }

    pub fn potential_d2(&self, x: f64) -> f64 {
        let (u, w, l) = (x - self.a, self.b - x, self.lambda);
        let bk = self.big_b * self.kappa;
        let wall = |s: f64| (-l * s).exp() * (l * l / s + 2.0 * l / (s * s) + 2.0 / (s * s * s));
        bk * (-self.kappa * u).exp() + bk * (-self.kappa * w).exp() + wall(u) + wall(w)
    }

    pub fn profile(&self) -> Result<ScalarProfile> {
        builtin_diffusion_model1(self.a, self.b, self.d_max)
    }

    pub fn build(&self) -> Result<Model<1, 1>> {
        self.build_with_profile(self.profile()?)
    }

    /// Same system with a caller-supplied D(x) on [a, b].
    pub fn build_with_profile(&self, shape: ScalarProfile) -> Result<Model<1, 1>> {
        self.validate()?;
        let profile = DiffusionProfile::<1>::composed(shape, |x| x[0], |_| v1(1.0), self.kbt)?;
        let this = *self;
        let force = Arc::new(move |x: &Vector<1>| v1(-this.potential_d1(x[0])));
        let domain = DomainSpec::interval(self.a, self.b)?;
        // U ≥ g_eff·x, so shifting by max(0, −g_eff)·b keeps V ≥ 0 on (a, b)
        let shift = (-self.g_eff).max(0.0) * self.b;
        let candidate = LyapunovCandidate::new(
            move |x: &Vector<1>| this.potential(x[0]) + shift,
            move |x: &Vector<1>| v1(this.potential_d1(x[0])),
            move |x: &Vector<1>| Matrix::<1>::new(this.potential_d2(x[0])),
        );
        Ok(from_fluctuation_dissipation("wall-gravity", profile, force, domain)?.with_lyapunov(candidate))
    }
}

/// Two colloids on a line interacting through a DLVO potential, held in a shallow
/// common harmonic trap.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DlvoPair {
    pub k_spring: f64,
    /// DLVO prefactor c.
    pub c: f64,
    /// DLVO screening length l.
    pub l: f64,
    pub kbt: f64,
    pub d_se: f64,
    pub alpha: f64,
}

impl Default for DlvoPair {
    fn default() -> Self {
        Self {
            k_spring: 0.5,
            c: 2.0,
            l: 0.5,
            kbt: 1.0,
            d_se: 1.0,
            alpha: 2.0,
        }
    }
}

impl DlvoPair {
    pub fn validate(&self) -> Result<()> {
        require_positive("k_spring", self.k_spring)?;
        require_positive("c", self.c)?;
        require_positive("l", self.l)?;
        require_positive("kBT", self.kbt)?;
        require_positive("d_se", self.d_se)?;
        require_positive("alpha", self.alpha)
    }

    /// U_DLVO(d) = c·e^{−d/l}/d
    pub fn dlvo(&self, d: f64) -> f64 {
        self.c * (-d / self.l).exp() / d
    }

    pub fn dlvo_d1(&self, d: f64) -> f64 {
        -self.c * (-d / self.l).exp() * (1.0 / (self.l * d) + 1.0 / (d * d))
    }

    pub fn dlvo_d2(&self, d: f64) -> f64 {
        let l = self.l;
        self.c * (-d / l).exp() * (1.0 / (l * l * d) + 2.0 / (l * d * d) + 2.0 / (d * d * d))
    }

    /// U(x₁, x₂) = (k/2)(x₁² + x₂²) + U_DLVO(x₂ − x₁)
    pub fn potential(&self, x: &Vector<2>) -> f64 {
        0.5 * self.k_spring * x.norm_squared() + self.dlvo(x[1] - x[0])
    }

    pub fn potential_grad(&self, x: &Vector<2>) -> Vector<2> {
        let dd = self.dlvo_d1(x[1] - x[0]);
        Vector::<2>::new(self.k_spring * x[0] - dd, self.k_spring * x[1] + dd)
    }

    pub fn potential_hess(&self, x: &Vector<2>) -> Matrix<2> {
        let h = self.dlvo_d2(x[1] - x[0]);
        let k = self.k_spring;
        Matrix::<2>::new(k + h, -h, -h, k + h)
    }

    pub fn profile(&self) -> Result<ScalarProfile> {
        builtin_diffusion_dlvo(self.d_se, self.alpha)
    }

    pub fn build(&self) -> Result<Model<2, 2>> {
        self.build_with_profile(self.profile()?)
    }

    pub fn build_with_profile(&self, shape: ScalarProfile) -> Result<Model<2, 2>> {
        self.validate()?;
        let profile = DiffusionProfile::<2>::composed(
            shape,
            |x| x[1] - x[0],
            |_| Vector::<2>::new(-1.0, 1.0),
            self.kbt,
        )?;
        let this = *self;
        let force = Arc::new(move |x: &Vector<2>| -this.potential_grad(x));
        let candidate = LyapunovCandidate::new(
            move |x: &Vector<2>| this.potential(x),
            move |x: &Vector<2>| this.potential_grad(x),
            move |x: &Vector<2>| this.potential_hess(x),
        );
        Ok(
            from_fluctuation_dissipation("dlvo-pair", profile, force, DomainSpec::OrderedHalfPlane)?
                .with_lyapunov(candidate),
        )
    }
}

/// Particle confined to a pore of radius C with a rotational (non-conservative)
/// force field γΩ(−x₂, x₁).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RotationalPore {
    pub c_radius: f64,
    pub big_b: f64,
    pub kappa: f64,
    pub omega: f64,
    pub kbt: f64,
    pub d0: f64,
    pub beta: f64,
}

impl Default for RotationalPore {
    fn default() -> Self {
        Self {
            c_radius: 1.0,
            big_b: 1.0,
            kappa: 1.0,
            omega: 1.0,
            kbt: 1.0,
            d0: 1.0,
            beta: 0.5,
        }
    }
}

impl RotationalPore {
    pub fn validate(&self) -> Result<()> {
        require_positive("c_radius", self.c_radius)?;
        require_positive("B", self.big_b)?;
        require_positive("kappa", self.kappa)?;
        require_positive("kBT", self.kbt)?;
        if !self.omega.is_finite() {
            return Err(Error::ParameterDomain {
                name: "omega",
                value: self.omega,
                reason: "must be finite",
            });
        }
        builtin_diffusion_pore(self.c_radius, self.d0, self.beta).map(|_| ())
    }

    fn c2(&self) -> f64 {
        self.c_radius * self.c_radius
    }

    /// 𝒰(s) = B e^{−κ(C²−s)} / (κ(C²−s)), s = r².
    pub fn radial(&self, s: f64) -> f64 {
        let w = self.c2() - s;
        self.big_b / (self.kappa * w) * (-self.kappa * w).exp()
    }

    pub fn radial_d1(&self, s: f64) -> f64 {
        let (w, k) = (self.c2() - s, self.kappa);
        self.big_b / k * (-k * w).exp() * (k / w + 1.0 / (w * w))
    }

    pub fn radial_d2(&self, s: f64) -> f64 {
        let (w, k) = (self.c2() - s, self.kappa);
        self.big_b / k * (-k * w).exp() * (k * k / w + 2.0 * k / (w * w) + 2.0 / (w * w * w))
    }

    pub fn potential(&self, x: &Vector<2>) -> f64 {
        self.radial(x.norm_squared())
    }

    pub fn potential_grad(&self, x: &Vector<2>) -> Vector<2> {
        x * (2.0 * self.radial_d1(x.norm_squared()))
    }

    pub fn potential_hess(&self, x: &Vector<2>) -> Matrix<2> {
        let s = x.norm_squared();
        Matrix::<2>::identity() * (2.0 * self.radial_d1(s)) + x * x.transpose() * (4.0 * self.radial_d2(s))
    }

    /// Rotational field (−γΩx₂, γΩx₁) for scalar friction γ.
    pub fn rotational_force(&self, x: &Vector<2>, gamma: f64) -> Vector<2> {
        Vector::<2>::new(-gamma * self.omega * x[1], gamma * self.omega * x[0])
    }

    pub fn profile(&self) -> Result<ScalarProfile> {
        builtin_diffusion_pore(self.c_radius, self.d0, self.beta)
    }

    pub fn build(&self) -> Result<Model<2, 2>> {
        self.build_with_profile(self.profile()?)
    }

    pub fn build_with_profile(&self, shape: ScalarProfile) -> Result<Model<2, 2>> {
        self.validate()?;
        let profile = DiffusionProfile::<2>::composed(
            shape,
            |x| x.norm_squared(),
            |x| x * 2.0,
            self.kbt,
        )?;
        let this = *self;
        let p = profile.clone();
        let force = Arc::new(move |x: &Vector<2>| {
            let gamma = this.kbt / p.d(x);
            this.rotational_force(x, gamma) - this.potential_grad(x)
        });
        let candidate = LyapunovCandidate::new(
            move |x: &Vector<2>| this.potential(x),
            move |x: &Vector<2>| this.potential_grad(x),
            move |x: &Vector<2>| this.potential_hess(x),
        );
        let domain = DomainSpec::disk(self.c_radius)?;
        Ok(from_fluctuation_dissipation("rotational-pore", profile, force, domain)?.with_lyapunov(candidate))
    }
}

/// Constant coefficients γ = g·I, σ = s·I, F = −k·x on all of Rⁿ.
///
/// Fluctuation–dissipation holds with k_BT = s²/(2g).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConstantBenchmark {
    pub dim: usize,
    pub friction: f64,
    pub noise: f64,
    pub spring: f64,
}

impl Default for ConstantBenchmark {
    fn default() -> Self {
        Self {
            dim: 1,
            friction: 1.0,
            noise: 1.0,
            spring: 1.0,
        }
    }
}

impl ConstantBenchmark {
    pub fn kbt(&self) -> f64 {
        self.noise * self.noise / (2.0 * self.friction)
    }

    pub fn validate(&self) -> Result<()> {
        require_positive("friction", self.friction)?;
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return Err(Error::ParameterDomain {
                name: "noise",
                value: self.noise,
                reason: "must be finite and nonnegative",
            });
        }
        if !(self.spring >= 0.0 && self.spring.is_finite()) {
            return Err(Error::ParameterDomain {
                name: "spring",
                value: self.spring,
                reason: "must be finite and nonnegative",
            });
        }
        if !(1..=2).contains(&self.dim) {
            return Err(Error::ParameterDomain {
                name: "dim",
                value: self.dim as f64,
                reason: "benchmark supports dim 1 or 2",
            });
        }
        Ok(())
    }

    pub fn build<const N: usize>(&self) -> Result<Model<N, N>> {
        self.validate()?;
        if self.dim != N {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: N,
            });
        }
        let Self {
            friction,
            noise,
            spring,
            ..
        } = *self;
        let candidate = LyapunovCandidate::new(
            |x: &Vector<N>| x.norm_squared(),
            |x: &Vector<N>| x * 2.0,
            |_: &Vector<N>| Matrix::<N>::identity() * 2.0,
        );
        Ok(Model::new(
            "constant",
            DomainSpec::AllSpace,
            Arc::new(move |x| -x * spring),
            Arc::new(move |_| Matrix::<N>::identity() * friction),
            Arc::new(move |_| Matrix::<N>::identity() * noise),
        )?
        .with_friction_grad(Arc::new(|_| [Matrix::<N>::zeros(); N]))
        .with_reference_noise_drift(Arc::new(|_| Vector::<N>::zeros()))
        .with_lyapunov(candidate))
    }
}

/// Deterministic dx = x² dt (γ = 1, σ = 0), which blows up in finite time.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExplosiveToy {}

impl ExplosiveToy {
    pub fn build(&self) -> Result<Model<1, 1>> {
        let candidate = LyapunovCandidate::new(
            |x: &Vector<1>| x[0] * x[0],
            |x: &Vector<1>| v1(2.0 * x[0]),
            |_: &Vector<1>| Matrix::<1>::new(2.0),
        );
        Ok(Model::new(
            "explosive",
            DomainSpec::AllSpace,
            Arc::new(|x: &Vector<1>| v1(x[0] * x[0])),
            Arc::new(|_| Matrix::<1>::identity()),
            Arc::new(|_| Matrix::<1>::zeros()),
        )?
        .with_friction_grad(Arc::new(|_| [Matrix::<1>::zeros()]))
        .with_lyapunov(candidate))
    }
}
