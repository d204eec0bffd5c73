//! Numerical evidence for non-explosion of the limiting diffusion: a candidate V must
//! grow without bound towards ∂X and infinity (p1) and satisfy LV ≤ CV + D (p2).

use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::domain::DomainSpec;
use crate::error::{Error, Result};
use crate::linalg::{Matrix, Vector};
use crate::models::{limiting_coefficients, MatrixField, Model, ScalarField, VectorField};

/// V ≥ 0 with its gradient and Hessian.
#[derive(Clone)]
pub struct LyapunovCandidate<const N: usize> {
    value: ScalarField<N>,
    gradient: VectorField<N>,
    hessian: MatrixField<N>,
}

impl<const N: usize> fmt::Debug for LyapunovCandidate<N> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("LyapunovCandidate")
    }
}

impl<const N: usize> LyapunovCandidate<N> {
    pub fn new(
        value: impl Fn(&Vector<N>) -> f64 + Send + Sync + 'static,
        gradient: impl Fn(&Vector<N>) -> Vector<N> + Send + Sync + 'static,
        hessian: impl Fn(&Vector<N>) -> Matrix<N> + Send + Sync + 'static,
    ) -> Self {
        Self {
            value: Arc::new(value),
            gradient: Arc::new(gradient),
            hessian: Arc::new(hessian),
        }
    }

    pub fn constant(c: f64) -> Self {
        Self::new(move |_| c, |_| Vector::<N>::zeros(), |_| Matrix::<N>::zeros())
    }

    pub fn value(&self, x: &Vector<N>) -> f64 {
        (self.value)(x)
    }

    pub fn gradient(&self, x: &Vector<N>) -> Vector<N> {
        (self.gradient)(x)
    }

    pub fn hessian(&self, x: &Vector<N>) -> Matrix<N> {
        (self.hessian)(x)
    }

    /// Largest relative mismatch between the supplied gradient/Hessian and central
    /// differences of V/∇V at `x`, measured as |fd − exact| / (1 + |exact|).
    pub fn consistency_error(&self, x: &Vector<N>, h: f64) -> f64 {
        let g = self.gradient(x);
        let hess = self.hessian(x);
        let mut fd_g = Vector::<N>::zeros();
        let mut fd_h = Matrix::<N>::zeros();
        for l in 0..N {
            let mut e = Vector::<N>::zeros();
            e[l] = h;
            fd_g[l] = (self.value(&(x + e)) - self.value(&(x - e))) / (2.0 * h);
            fd_h.set_column(l, &((self.gradient(&(x + e)) - self.gradient(&(x - e))) / (2.0 * h)));
        }
        let eg = (fd_g - g).norm() / (1.0 + g.norm());
        let eh = (fd_h - hess).norm() / (1.0 + hess.norm());
        eg.max(eh)
    }
}

/// LV(x) = b(x)·∇V(x) + ½ tr(Γ(x) ∇²V(x)) with b = γ⁻¹F + S and Γ = (γ⁻¹σ)(γ⁻¹σ)ᵀ.
pub fn apply_generator<const N: usize, const K: usize>(
    model: &Model<N, K>,
    cand: &LyapunovCandidate<N>,
    x: &Vector<N>,
) -> Result<f64> {
    let c = limiting_coefficients(model, x)?;
    let big_gamma = c.diffusion * c.diffusion.transpose();
    Ok(c.drift.dot(&cand.gradient(x)) + 0.5 * (big_gamma * cand.hessian(x)).trace())
}

/// Shell indices probing boundary distances 1e-1 … 1e-4 and radii 10 … 1e4.
pub const DEFAULT_SHELLS: [u32; 4] = [10, 100, 1_000, 10_000];

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ShellEstimate {
    pub k: u32,
    /// Sampled estimate of inf V over X ∖ X_k.
    pub inf_v: f64,
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct P1Report {
    pub shells: Vec<ShellEstimate>,
    pub pass: bool,
}

/// Points of X ∖ X_k: boundary layers at distances 1/k · 10^{−3j/3}, j = 0..=3, and
/// spheres of radius k·2^j, j = 0..=3.
pub fn shell_complement_samples<const N: usize>(
    domain: &DomainSpec,
    k: u32,
    samples_per_layer: usize,
) -> Vec<Vector<N>> {
    let kf = f64::from(k);
    let mut pts = Vec::new();
    if domain.has_boundary() {
        for j in 0..=3 {
            let delta = 10f64.powi(-j) / kf;
            pts.extend(domain.points_at_distance::<N>(delta, samples_per_layer));
        }
    }
    for j in 0..=3 {
        pts.extend(domain.points_at_radius::<N>(kf * 2f64.powi(j), samples_per_layer));
    }
    pts.retain(|p| !domain.in_shell(p.as_slice(), k));
    pts
}

/// p1: inf_{X∖X_k} V must increase without bound in k. PASS when the sampled infima
/// are non-decreasing and the last exceeds ten times the first.
pub fn verify_p1<const N: usize>(
    domain: &DomainSpec,
    cand: &LyapunovCandidate<N>,
    shells: &[u32],
    samples_per_layer: usize,
) -> Result<P1Report> {
    if shells.is_empty() {
        return Err(Error::Config("verify_p1 needs at least one shell".into()));
    }
    let mut out = Vec::with_capacity(shells.len());
    for &k in shells {
        let pts = shell_complement_samples::<N>(domain, k, samples_per_layer);
        if pts.is_empty() {
            return Err(Error::SamplingFailure { k });
        }
        let inf_v = pts.iter().map(|p| cand.value(p)).fold(f64::INFINITY, f64::min);
        out.push(ShellEstimate {
            k,
            inf_v,
            samples: pts.len(),
        });
    }
    let monotone = out.windows(2).all(|w| w[1].inf_v >= w[0].inf_v);
    let first = out[0].inf_v;
    let last = out[out.len() - 1].inf_v;
    let pass = monotone && last > 10.0 * first && last > 0.0;
    Ok(P1Report { shells: out, pass })
}

/// Probe points for p2. The fit of D uses `inner`; `outer` holds the extreme points
/// (boundary distance 1e-4, radii 1e3 and 1e4) on which the fitted bound must still hold.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeGrid<const N: usize> {
    pub inner: Vec<Vector<N>>,
    pub outer: Vec<Vector<N>>,
}

impl<const N: usize> ProbeGrid<N> {
    pub fn for_domain(domain: &DomainSpec, count: usize) -> Self {
        let layer = 16;
        let mut inner = domain.grid_points::<N>(count);
        let mut outer = Vec::new();
        if domain.has_boundary() {
            for delta in [1e-1, 1e-2, 1e-3] {
                inner.extend(domain.points_at_distance::<N>(delta, layer));
            }
            outer.extend(domain.points_at_distance::<N>(1e-4, layer));
        }
        if !domain.is_bounded() {
            inner.extend(domain.points_at_radius::<N>(10.0, layer));
            for r in [1e3, 1e4] {
                outer.extend(domain.points_at_radius::<N>(r, layer));
            }
        }
        Self { inner, outer }
    }
}

pub const C_CANDIDATES: [f64; 12] = [
    0.0, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0, 128.0, 256.0, 512.0, 1024.0,
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct P2Report {
    #[serde(rename = "C")]
    pub c: f64,
    #[serde(rename = "D")]
    pub d: f64,
    pub max_violation: f64,
    pub pass: bool,
}

/// p2: search C over {0, 2⁰, …, 2¹⁰}, set D = max over the inner grid of LV − CV, and
/// keep the C whose bound is least violated over the whole grid.
pub fn verify_p2<const N: usize, const K: usize>(
    model: &Model<N, K>,
    cand: &LyapunovCandidate<N>,
    grid: &ProbeGrid<N>,
) -> Result<P2Report> {
    let eval = |x: &Vector<N>| -> Result<(f64, f64)> {
        let lv = apply_generator(model, cand, x)?;
        // NaN is scored as an unbounded generator value
        Ok((if lv.is_nan() { f64::INFINITY } else { lv }, cand.value(x)))
    };
    let inner = grid.inner.iter().map(eval).collect::<Result<Vec<_>>>()?;
    let outer = grid.outer.iter().map(eval).collect::<Result<Vec<_>>>()?;
    let mut best: Option<P2Report> = None;
    for c in C_CANDIDATES {
        let residual = |&(lv, v): &(f64, f64)| lv - c * v;
        let d = inner.iter().map(residual).fold(f64::NEG_INFINITY, f64::max);
        let d = if d.is_finite() { d } else { 0.0 };
        let max_violation = inner
            .iter()
            .chain(&outer)
            .map(|p| residual(p) - d)
            .fold(0.0, f64::max);
        let pass = max_violation <= 1e-9 * (1.0 + d.abs());
        let report = P2Report {
            c,
            d,
            max_violation,
            pass,
        };
        if best.is_none_or(|b| max_violation < b.max_violation) {
            best = Some(report);
        }
    }
    Ok(best.expect("candidate list is non-empty"))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LyapunovReport {
    pub p1: Vec<ShellEstimate>,
    pub p2: P2Report,
    pub pass: bool,
}

impl LyapunovReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report is serializable")
    }
}

/// p1 and p2 for the model's own candidate with default shells and probe grid.
pub fn check_model<const N: usize, const K: usize>(model: &Model<N, K>, grid_points: usize) -> Result<LyapunovReport> {
    let cand = model
        .lyapunov_candidate()
        .ok_or_else(|| Error::Config(format!("model `{}` has no Lyapunov candidate", model.name())))?;
    check_candidate(model, cand, grid_points)
}

pub fn check_candidate<const N: usize, const K: usize>(
    model: &Model<N, K>,
    cand: &LyapunovCandidate<N>,
    grid_points: usize,
) -> Result<LyapunovReport> {
    let p1 = verify_p1(model.domain(), cand, &DEFAULT_SHELLS, 16)?;
    let p2 = verify_p2(model, cand, &ProbeGrid::for_domain(model.domain(), grid_points))?;
    Ok(LyapunovReport {
        pass: p1.pass && p2.pass,
        p1: p1.shells,
        p2,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{ConstantBenchmark, ExplosiveToy, WallGravity};

    #[test]
    fn constant_function_has_zero_generator() {
        let model = WallGravity::default().build().unwrap();
        let cand = LyapunovCandidate::<1>::constant(3.0);
        for x in model.domain().grid_points::<1>(50) {
            assert_eq!(apply_generator(&model, &cand, &x).unwrap(), 0.0);
        }
    }

    #[test]
    fn zero_candidate_fails_p1() {
        let domain = DomainSpec::Interval { a: 0.0, b: 1.0 };
        let r = verify_p1(&domain, &LyapunovCandidate::<1>::constant(0.0), &DEFAULT_SHELLS, 8).unwrap();
        assert!(!r.pass);
    }

    #[test]
    fn bounded_domain_with_huge_shell_still_samples_boundary() {
        let domain = DomainSpec::Disk { radius: 1.0 };
        let pts = shell_complement_samples::<2>(&domain, 1_000_000, 8);
        assert!(!pts.is_empty());
        let pts = shell_complement_samples::<2>(&DomainSpec::AllSpace, 3, 8);
        assert!(pts.iter().all(|p| p.norm() >= 3.0 - 1e-12));
    }

    #[test]
    fn explosive_toy_fails_p2() {
        let model = ExplosiveToy {}.build().unwrap();
        let cand = model.lyapunov_candidate().unwrap();
        let r = verify_p2(&model, cand, &ProbeGrid::for_domain(model.domain(), 200)).unwrap();
        assert!(!r.pass, "{r:?}");
    }

    #[test]
    fn constant_benchmark_passes_with_quadratic_candidate() {
        let model = ConstantBenchmark::default().build::<1>().unwrap();
        let report = check_model(&model, 200).unwrap();
        assert!(report.pass, "{}", report.to_json());
        // LV = −2x²·k/g + s²/g² is bounded above by its value at 0
        assert_eq!(report.p2.c, 0.0);
        assert!((report.p2.d - 1.0).abs() < 1e-12);
    }

    #[test]
    fn candidate_consistency_check_detects_wrong_gradient() {
        let good = LyapunovCandidate::<2>::new(
            |x| x.norm_squared(),
            |x| x * 2.0,
            |_| Matrix::<2>::identity() * 2.0,
        );
        let bad = LyapunovCandidate::<2>::new(|x| x.norm_squared(), |x| x * 3.0, |_| Matrix::<2>::identity() * 2.0);
        let x = Vector::<2>::new(0.4, -1.2);
        assert!(good.consistency_error(&x, 1e-5) < 1e-6);
        assert!(bad.consistency_error(&x, 1e-5) > 1e-2);
    }

    #[test]
    fn report_json_shape() {
        let model = ConstantBenchmark::default().build::<1>().unwrap();
        let v: serde_json::Value = serde_json::from_str(&check_model(&model, 50).unwrap().to_json()).unwrap();
        assert!(v["p1"].is_array());
        for key in ["C", "D", "max_violation"] {
            assert!(v["p2"][key].is_number(), "{key}");
        }
        assert!(v["pass"].is_boolean());
    }
}
