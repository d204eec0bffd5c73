use nalgebra::SVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Open state space of a model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DomainSpec {
    /// (a, b) with 0 ≤ a < b < ∞.
    Interval { a: f64, b: f64 },
    /// {(x₁, x₂) : x₁ < x₂}.
    OrderedHalfPlane,
    /// {x : |x| < radius}.
    Disk { radius: f64 },
    AllSpace,
}

impl DomainSpec {
    pub fn interval(a: f64, b: f64) -> Result<Self> {
        if !(a >= 0.0 && a < b && b.is_finite()) {
            return Err(Error::ParameterDomain {
                name: "interval",
                value: b - a,
                reason: "interval requires 0 <= a < b < inf",
            });
        }
        Ok(Self::Interval { a, b })
    }

    pub fn disk(radius: f64) -> Result<Self> {
        crate::error::require_positive("radius", radius)?;
        Ok(Self::Disk { radius })
    }

    /// Distance to ∂X for points of X, zero outside X, +∞ when ∂X is empty.
    pub fn boundary_distance(&self, x: &[f64]) -> f64 {
        let d = match *self {
            Self::Interval { a, b } => (x[0] - a).min(b - x[0]),
            Self::OrderedHalfPlane => (x[1] - x[0]) * std::f64::consts::FRAC_1_SQRT_2,
            Self::Disk { radius } => radius - norm(x),
            Self::AllSpace => return f64::INFINITY,
        };
        // NaN compares false here and maps to 0: a non-finite point is never inside
        if d > 0.0 {
            d
        } else {
            0.0
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        self.boundary_distance(x) > 0.0
    }

    pub fn has_boundary(&self) -> bool {
        !matches!(self, Self::AllSpace)
    }

    pub fn is_bounded(&self) -> bool {
        matches!(self, Self::Interval { .. } | Self::Disk { .. })
    }

    /// Dimension the domain is defined in, if it fixes one.
    pub fn required_dim(&self) -> Option<usize> {
        match self {
            Self::Interval { .. } => Some(1),
            Self::OrderedHalfPlane => Some(2),
            Self::Disk { .. } | Self::AllSpace => None,
        }
    }

    /// Membership in the exhausting subdomain
    /// X_k = {x ∈ X : distance(x, ∂X) > 1/k and |x| < k}.
    pub fn in_shell(&self, x: &[f64], k: u32) -> bool {
        let k = f64::from(k);
        let inner = norm(x) < k;
        if self.has_boundary() {
            inner && self.boundary_distance(x) > 1.0 / k
        } else {
            inner
        }
    }
}

impl DomainSpec {
    /// Box that the deterministic probe grids are drawn from.
    fn probe_box(&self, dim: usize) -> Vec<(f64, f64)> {
        match *self {
            Self::Interval { a, b } => vec![(a, b)],
            Self::OrderedHalfPlane => vec![(-5.0, 5.0); dim],
            Self::Disk { radius } => vec![(-radius, radius); dim],
            Self::AllSpace => vec![(-3.0, 3.0); dim],
        }
    }

    /// `count` deterministic interior points, spread by a Halton sequence over a
    /// box covering (the bulk of) the domain.
    pub fn grid_points<const N: usize>(&self, count: usize) -> Vec<SVector<f64, N>> {
        const BASES: [u64; 4] = [2, 3, 5, 7];
        assert!(N <= BASES.len(), "probe grids support n <= 4");
        let bounds = self.probe_box(N);
        let mut out = Vec::with_capacity(count);
        let mut index = 1u64;
        while out.len() < count {
            let p = SVector::<f64, N>::from_fn(|i, _| {
                let (lo, hi) = bounds[i];
                lo + (hi - lo) * radical_inverse(index, BASES[i])
            });
            index += 1;
            if self.contains(p.as_slice()) {
                out.push(p);
            }
        }
        out
    }
}

impl DomainSpec {
    /// Up to `count` points of X at boundary distance exactly `delta`; empty when ∂X is.
    pub fn points_at_distance<const N: usize>(&self, delta: f64, count: usize) -> Vec<SVector<f64, N>> {
        let pts: Vec<SVector<f64, N>> = match *self {
            Self::Interval { a, b } => [a + delta, b - delta]
                .into_iter()
                .map(SVector::<f64, N>::from_element)
                .collect(),
            Self::OrderedHalfPlane if N == 2 => {
                let h = std::f64::consts::FRAC_1_SQRT_2;
                let count = count.max(2);
                (0..count)
                    .map(|j| {
                        // position along the diagonal x₁ = x₂, spread over [−5, 5]
                        let c = -5.0 + 10.0 * j as f64 / (count - 1) as f64;
                        SVector::<f64, N>::from_fn(|i, _| if i == 0 { h * (c - delta) } else { h * (c + delta) })
                    })
                    .collect()
            }
            Self::Disk { radius } => directions::<N>(count)
                .into_iter()
                .map(|u| u * (radius - delta))
                .collect(),
            _ => Vec::new(),
        };
        pts.into_iter()
            .filter(|p| self.contains(p.as_slice()) && (self.boundary_distance(p.as_slice()) - delta).abs() <= 1e-9 * (1.0 + delta))
            .collect()
    }

    /// Points of X on the sphere |x| = radius.
    pub fn points_at_radius<const N: usize>(&self, radius: f64, count: usize) -> Vec<SVector<f64, N>> {
        directions::<N>(count)
            .into_iter()
            .map(|u| u * radius)
            .filter(|p| self.contains(p.as_slice()))
            .collect()
    }
}

/// Deterministic unit vectors: ±1 in one dimension, equally spaced angles in two,
/// normalized Halton points beyond.
fn directions<const N: usize>(count: usize) -> Vec<SVector<f64, N>> {
    match N {
        0 => Vec::new(),
        1 => vec![SVector::<f64, N>::from_element(1.0), SVector::<f64, N>::from_element(-1.0)],
        2 => (0..count.max(1))
            .map(|j| {
                let t = 2.0 * std::f64::consts::PI * (j as f64 + 0.5) / count.max(1) as f64;
                SVector::<f64, N>::from_fn(|i, _| if i == 0 { t.cos() } else { t.sin() })
            })
            .collect(),
        _ => {
            const BASES: [u64; 4] = [2, 3, 5, 7];
            let mut out = Vec::with_capacity(count);
            let mut index = 1u64;
            while out.len() < count {
                let p = SVector::<f64, N>::from_fn(|i, _| 2.0 * radical_inverse(index, BASES[i % 4]) - 1.0);
                index += 1;
                let n = p.norm();
                if n > 0.1 {
                    out.push(p / n);
                }
            }
            out
        }
    }
}

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut r = 0.0;
    while i > 0 {
        r += f * (i % base) as f64;
        i /= base;
        f *= inv;
    }
    r
}

pub(crate) fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn boundary_layers_sit_at_the_requested_distance() {
        let cases = [
            DomainSpec::Disk { radius: 2.0 },
            DomainSpec::OrderedHalfPlane,
        ];
        for d in cases {
            let pts = d.points_at_distance::<2>(1e-3, 16);
            assert!(pts.len() >= 16);
            for p in pts {
                assert!((d.boundary_distance(p.as_slice()) - 1e-3).abs() < 1e-12);
            }
        }
        let i = DomainSpec::Interval { a: 0.0, b: 1.0 };
        assert_eq!(i.points_at_distance::<1>(0.25, 8).len(), 2);
        assert!(DomainSpec::AllSpace.points_at_distance::<2>(0.1, 8).is_empty());
        assert!(DomainSpec::Disk { radius: 1.0 }.points_at_radius::<2>(2.0, 8).is_empty());
        assert_eq!(DomainSpec::AllSpace.points_at_radius::<3>(5.0, 8).len(), 8);
    }

    #[test]
    fn interval_validation() {
        assert!(DomainSpec::interval(0.0, 1.0).is_ok());
        assert!(DomainSpec::interval(-1.0, 1.0).is_err());
        assert!(DomainSpec::interval(1.0, 1.0).is_err());
        assert!(DomainSpec::interval(0.0, f64::INFINITY).is_err());
    }

    #[test]
    fn distances() {
        let i = DomainSpec::interval(0.0, 1.0).unwrap();
        assert_eq!(i.boundary_distance(&[0.25]), 0.25);
        assert_eq!(i.boundary_distance(&[1.5]), 0.0);
        assert!(!i.contains(&[0.0]));
        let h = DomainSpec::OrderedHalfPlane;
        assert!((h.boundary_distance(&[0.0, 1.0]) - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
        assert!(!h.contains(&[1.0, 1.0]));
        let d = DomainSpec::disk(2.0).unwrap();
        assert_eq!(d.boundary_distance(&[0.0, 0.0]), 2.0);
        assert!(!d.contains(&[2.0, 0.0]));
        assert_eq!(DomainSpec::AllSpace.boundary_distance(&[1e9]), f64::INFINITY);
        assert!(!i.contains(&[f64::NAN]));
    }

    #[test]
    fn grid_points_are_interior_and_distinct() {
        let pts = DomainSpec::disk(1.0).unwrap().grid_points::<2>(500);
        assert_eq!(pts.len(), 500);
        assert!(pts.iter().all(|p| p.norm() < 1.0));
        let pts = DomainSpec::interval(0.0, 1.0).unwrap().grid_points::<1>(100);
        let mut xs: Vec<f64> = pts.iter().map(|p| p[0]).collect();
        xs.sort_by(f64::total_cmp);
        xs.dedup();
        assert_eq!(xs.len(), 100);
        assert!(DomainSpec::OrderedHalfPlane
            .grid_points::<2>(300)
            .iter()
            .all(|p| p[0] < p[1]));
    }

    #[test]
    fn shells_are_nested() {
        let h = DomainSpec::OrderedHalfPlane;
        let p = [0.0, 0.05];
        assert!(!h.in_shell(&p, 10));
        assert!(h.in_shell(&p, 100));
        assert!(!h.in_shell(&[-50.0, 50.0], 10));
    }

    proptest! {
        #[test]
        fn membership_iff_positive_distance(x in -3.0f64..3.0, y in -3.0f64..3.0) {
            for dom in [
                DomainSpec::interval(0.0, 1.0).unwrap(),
                DomainSpec::OrderedHalfPlane,
                DomainSpec::disk(1.5).unwrap(),
                DomainSpec::AllSpace,
            ] {
                let p = [x, y];
                prop_assert_eq!(dom.contains(&p), dom.boundary_distance(&p) > 0.0);
                prop_assert!(dom.boundary_distance(&p) >= 0.0);
                for k in 1..20u32 {
                    if dom.in_shell(&p, k) {
                        prop_assert!(dom.in_shell(&p, k + 1));
                    }
                }
            }
        }
    }
}
