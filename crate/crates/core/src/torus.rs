//! Points, minimal-image arithmetic and smooth radial bumps on the 2-torus.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance under which two torus points are considered equal.
pub const POINT_EQ_TOL: f64 = 1e-12;

/// A point of ℝ²/ℤ² stored in its canonical representative `[0,1)²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TorusPoint {
    pub u: f64,
    pub v: f64,
}

#[inline]
fn reduce(a: f64) -> f64 {
    let r = a.rem_euclid(1.0);
    // rem_euclid of a tiny negative number rounds up to exactly 1.0
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}

impl TorusPoint {
    pub const ORIGIN: TorusPoint = TorusPoint { u: 0.0, v: 0.0 };

    /// Reduces a finite lift to the canonical square; panics on non-finite
    /// input (use [`wrap`] for checked construction).
    #[inline]
    pub fn from_lift(x: [f64; 2]) -> TorusPoint {
        debug_assert!(x[0].is_finite() && x[1].is_finite());
        TorusPoint {
            u: reduce(x[0]),
            v: reduce(x[1]),
        }
    }

    #[inline]
    pub fn lift(&self) -> [f64; 2] {
        [self.u, self.v]
    }

    /// Translate by a vector in the covering plane.
    #[inline]
    pub fn shifted(&self, d: [f64; 2]) -> TorusPoint {
        TorusPoint::from_lift([self.u + d[0], self.v + d[1]])
    }

    /// `torus_dist(self, other) < POINT_EQ_TOL`.
    pub fn approx_eq(&self, other: &TorusPoint) -> bool {
        torus_dist(self, other) < POINT_EQ_TOL
    }
}

/// Componentwise reduction mod 1 into `[0,1)²`.
pub fn wrap(x: [f64; 2]) -> Result<TorusPoint> {
    if !x[0].is_finite() || !x[1].is_finite() {
        return Err(Error::NonFinite(x[0], x[1]));
    }
    Ok(TorusPoint::from_lift(x))
}

/// Minimal-image displacement `a - b`, each component in `[-1/2, 1/2]`.
#[inline]
pub fn delta(a: &TorusPoint, b: &TorusPoint) -> [f64; 2] {
    let mut du = a.u - b.u;
    let mut dv = a.v - b.v;
    du -= du.round();
    dv -= dv.round();
    [du, dv]
}

#[inline]
pub fn norm(d: [f64; 2]) -> f64 {
    d[0].hypot(d[1])
}

/// Euclidean distance minimised over integer translates.
#[inline]
pub fn torus_dist(a: &TorusPoint, b: &TorusPoint) -> f64 {
    norm(delta(a, b))
}

/// Axis-aligned rectangle in the covering plane used as a fiber chart.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FiberRect {
    pub u_min: f64,
    pub u_max: f64,
    pub v_min: f64,
    pub v_max: f64,
}

impl FiberRect {
    pub fn new(u_min: f64, u_max: f64, v_min: f64, v_max: f64) -> Result<FiberRect> {
        if !(u_min < u_max && v_min < v_max) || u_max - u_min > 1.0 || v_max - v_min > 1.0 {
            return Err(Error::InvalidInput(format!(
                "bad fiber rectangle [{u_min},{u_max}]x[{v_min},{v_max}]"
            )));
        }
        Ok(FiberRect {
            u_min,
            u_max,
            v_min,
            v_max,
        })
    }

    pub fn unit() -> FiberRect {
        FiberRect {
            u_min: 0.0,
            u_max: 1.0,
            v_min: 0.0,
            v_max: 1.0,
        }
    }

    /// Square of half-width `r` centred at the lift `c`.
    pub fn around(c: [f64; 2], r: f64) -> FiberRect {
        FiberRect {
            u_min: c[0] - r,
            u_max: c[0] + r,
            v_min: c[1] - r,
            v_max: c[1] + r,
        }
    }

    pub fn contains_lift(&self, x: [f64; 2]) -> bool {
        x[0] >= self.u_min && x[0] <= self.u_max && x[1] >= self.v_min && x[1] <= self.v_max
    }

    /// Cell-centred `n × n` grid of lifts, row-major in `v`.
    pub fn grid(&self, n: usize) -> Vec<[f64; 2]> {
        let du = (self.u_max - self.u_min) / n as f64;
        let dv = (self.v_max - self.v_min) / n as f64;
        let mut out = Vec::with_capacity(n * n);
        for j in 0..n {
            for i in 0..n {
                out.push([
                    self.u_min + (i as f64 + 0.5) * du,
                    self.v_min + (j as f64 + 0.5) * dv,
                ]);
            }
        }
        out
    }
}

/// A region of one fiber: a rectangle of the chart or a geodesic disk.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FiberRegion {
    Rect(FiberRect),
    Disk { center: TorusPoint, radius: f64 },
}

impl FiberRegion {
    pub fn bounding_rect(&self) -> FiberRect {
        match *self {
            FiberRegion::Rect(r) => r,
            FiberRegion::Disk { center, radius } => FiberRect::around(center.lift(), radius),
        }
    }

    pub fn contains_lift(&self, x: [f64; 2]) -> bool {
        match *self {
            FiberRegion::Rect(r) => r.contains_lift(x),
            FiberRegion::Disk { center, radius } => {
                torus_dist(&TorusPoint::from_lift(x), &center) <= radius
            }
        }
    }

    /// Grid points of the bounding rectangle that fall inside the region.
    pub fn grid(&self, n: usize) -> Vec<TorusPoint> {
        self.bounding_rect()
            .grid(n)
            .into_iter()
            .filter(|x| self.contains_lift(*x))
            .map(TorusPoint::from_lift)
            .collect()
    }
}

/// Radial bump: 1 on `[0, inner]`, 0 on `[outer, ∞)` and a smoothstep
/// polynomial in between that is `C^order` at both junctions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawBumpProfile", into = "RawBumpProfile")]
pub struct BumpProfile {
    inner_radius: f64,
    outer_radius: f64,
    order: u32,
    /// Coefficients of the smoothstep `S(t) = Σ c_k t^k`.
    coeffs: Vec<f64>,
}

// Wire form: the coefficients are rebuilt (and the radii validated) on load.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBumpProfile {
    inner_radius: f64,
    outer_radius: f64,
    #[serde(default = "default_order")]
    order: u32,
}

fn default_order() -> u32 {
    2
}

impl TryFrom<RawBumpProfile> for BumpProfile {
    type Error = Error;

    fn try_from(r: RawBumpProfile) -> Result<BumpProfile> {
        BumpProfile::with_order(r.inner_radius, r.outer_radius, r.order)
    }
}

impl From<BumpProfile> for RawBumpProfile {
    fn from(b: BumpProfile) -> RawBumpProfile {
        RawBumpProfile {
            inner_radius: b.inner_radius,
            outer_radius: b.outer_radius,
            order: b.order,
        }
    }
}

fn binomial(n: u64, k: u64) -> f64 {
    let mut acc = 1.0;
    for i in 0..k {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    acc
}

fn smoothstep_coeffs(order: u32) -> Vec<f64> {
    // S_n(t) = t^{n+1} Σ_k C(n+k,k) C(2n+1,n-k) (-t)^k
    let n = order as u64;
    let mut c = vec![0.0; (2 * n + 2) as usize];
    for k in 0..=n {
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        c[(n + 1 + k) as usize] = sign * binomial(n + k, k) * binomial(2 * n + 1, n - k);
    }
    c
}

impl BumpProfile {
    /// The quintic smoothstep profile (`order = 2`).
    pub fn new(inner_radius: f64, outer_radius: f64) -> Result<BumpProfile> {
        BumpProfile::with_order(inner_radius, outer_radius, 2)
    }

    pub fn with_order(inner_radius: f64, outer_radius: f64, order: u32) -> Result<BumpProfile> {
        if !(inner_radius > 0.0 && outer_radius > inner_radius && outer_radius.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "bump radii must satisfy 0 < inner < outer, got {inner_radius}, {outer_radius}"
            )));
        }
        if !(2..=8).contains(&order) {
            return Err(Error::InvalidInput(format!(
                "bump order must be in 2..=8, got {order}"
            )));
        }
        Ok(BumpProfile {
            inner_radius,
            outer_radius,
            order,
            coeffs: smoothstep_coeffs(order),
        })
    }

    pub fn inner_radius(&self) -> f64 {
        self.inner_radius
    }

    pub fn outer_radius(&self) -> f64 {
        self.outer_radius
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    fn width(&self) -> f64 {
        self.outer_radius - self.inner_radius
    }

    fn coeffs(&self) -> std::borrow::Cow<'_, [f64]> {
        // deserialized profiles carry no cached coefficients
        if self.coeffs.is_empty() {
            std::borrow::Cow::Owned(smoothstep_coeffs(self.order))
        } else {
            std::borrow::Cow::Borrowed(&self.coeffs)
        }
    }

    fn poly(&self, t: f64, deriv: usize) -> f64 {
        let c = self.coeffs();
        let mut acc = 0.0;
        for k in (deriv..c.len()).rev() {
            let mut f = 1.0;
            for j in 0..deriv {
                f *= (k - j) as f64;
            }
            acc = acc * t + c[k] * f;
        }
        // Horner over k >= deriv evaluates Σ c_k f_k t^{k-deriv}
        acc
    }

    /// Bump value at radius `r`.
    pub fn eval(&self, r: f64) -> Result<f64> {
        if r < 0.0 || r.is_nan() {
            return Err(Error::InvalidInput(format!("negative radius {r}")));
        }
        Ok(self.value(r))
    }

    /// Unchecked value; `r` must be non-negative.
    #[inline]
    pub fn value(&self, r: f64) -> f64 {
        if r <= self.inner_radius {
            1.0
        } else if r >= self.outer_radius {
            0.0
        } else {
            let t = (r - self.inner_radius) / self.width();
            (1.0 - self.poly(t, 0)).clamp(0.0, 1.0)
        }
    }

    /// First derivative in `r`.
    #[inline]
    pub fn d1(&self, r: f64) -> f64 {
        if r <= self.inner_radius || r >= self.outer_radius {
            0.0
        } else {
            let t = (r - self.inner_radius) / self.width();
            -self.poly(t, 1) / self.width()
        }
    }

    /// Second derivative in `r`.
    #[inline]
    pub fn d2(&self, r: f64) -> f64 {
        if r <= self.inner_radius || r >= self.outer_radius {
            0.0
        } else {
            let t = (r - self.inner_radius) / self.width();
            -self.poly(t, 2) / (self.width() * self.width())
        }
    }

    /// `sup |ψ'|`, attained at the midpoint of the transition band.
    pub fn max_slope(&self) -> f64 {
        self.d1(0.5 * (self.inner_radius + self.outer_radius)).abs()
    }
}

/// Checked bump evaluation.
pub fn bump_eval(b: &BumpProfile, r: f64) -> Result<f64> {
    b.eval(r)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wrap_examples() {
        let p = wrap([1.25, -0.5]).unwrap();
        assert_eq!((p.u, p.v), (0.25, 0.5));
        let p = wrap([0.0, 0.0]).unwrap();
        assert_eq!((p.u, p.v), (0.0, 0.0));
        let p = wrap([2.0, 3.0]).unwrap();
        assert_eq!((p.u, p.v), (0.0, 0.0));
        assert!(wrap([f64::NAN, 0.0]).is_err());
        assert!(wrap([0.0, f64::INFINITY]).is_err());
    }

    #[test]
    fn wrap_tiny_negative_stays_in_unit_square() {
        let p = wrap([-1e-18, -0.0]).unwrap();
        assert!(p.u >= 0.0 && p.u < 1.0);
        assert!(p.v >= 0.0 && p.v < 1.0);
    }

    #[test]
    fn distance_examples() {
        let o = TorusPoint::ORIGIN;
        assert_eq!(torus_dist(&o, &o), 0.0);
        let a = TorusPoint { u: 0.9, v: 0.0 };
        let b = TorusPoint { u: 0.1, v: 0.0 };
        assert!((torus_dist(&a, &b) - 0.2).abs() < 1e-15);
        let c = TorusPoint { u: 0.5, v: 0.5 };
        assert!((torus_dist(&o, &c) - 0.5f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn bump_plateau_support_and_midpoint() {
        let b = BumpProfile::new(0.1, 0.3).unwrap();
        assert_eq!(bump_eval(&b, 0.0).unwrap(), 1.0);
        assert_eq!(bump_eval(&b, 0.3).unwrap(), 0.0);
        // 1 - (10/8 - 15/16 + 6/32) = 0.5
        assert!((bump_eval(&b, 0.2).unwrap() - 0.5).abs() < 1e-15);
        assert!(bump_eval(&b, -0.1).is_err());
        assert!(BumpProfile::new(0.3, 0.1).is_err());
        assert!(BumpProfile::new(0.0, 0.1).is_err());
    }

    #[test]
    fn smoothstep_coefficients_match_quintic() {
        assert_eq!(
            smoothstep_coeffs(2),
            vec![0.0, 0.0, 0.0, 10.0, -15.0, 6.0]
        );
    }

    #[test]
    fn bump_monotone_on_dense_sample() {
        let b = BumpProfile::new(0.05, 0.4).unwrap();
        let mut prev = f64::INFINITY;
        for i in 0..10_000 {
            let r = 0.5 * i as f64 / 10_000.0;
            let val = b.value(r);
            assert!(val <= prev);
            assert!((0.0..=1.0).contains(&val));
            prev = val;
        }
    }

    #[test]
    fn bump_junctions_are_c2() {
        let b = BumpProfile::new(0.1, 0.3).unwrap();
        let h = 1e-6;
        for r0 in [b.inner_radius(), b.outer_radius()] {
            let fd = (b.value(r0 + h) - b.value(r0 - h)) / (2.0 * h);
            assert!(fd.abs() < 1e-6, "first difference {fd} at {r0}");
            let h2 = 1e-3;
            let sd = b.value(r0 + h2) - 2.0 * b.value(r0) + b.value(r0 - h2);
            assert!(sd.abs() <= 1e-3, "second difference {sd} at {r0}");
            let d2_jump = (b.d2(r0 + 1e-9) - b.d2(r0 - 1e-9)).abs();
            assert!(d2_jump < 1e-4, "second derivative jumps by {d2_jump} at {r0}");
        }
    }

    #[test]
    fn analytic_derivatives_match_finite_differences() {
        let b = BumpProfile::new(0.1, 0.3).unwrap();
        let h = 1e-6;
        for i in 1..50 {
            let r = 0.1 + 0.2 * i as f64 / 50.0;
            let fd1 = (b.value(r + h) - b.value(r - h)) / (2.0 * h);
            let fd2 = (b.d1(r + h) - b.d1(r - h)) / (2.0 * h);
            assert!((fd1 - b.d1(r)).abs() < 1e-6);
            assert!((fd2 - b.d2(r)).abs() < 1e-4);
        }
        assert!((b.max_slope() - 1.875 / 0.2).abs() < 1e-12);
    }

    #[test]
    fn higher_order_profile_is_flatter_at_junction() {
        let b = BumpProfile::with_order(0.1, 0.3, 3).unwrap();
        assert!((b.value(0.2) - 0.5).abs() < 1e-14);
        assert!(b.d2(0.1 + 1e-6).abs() < 1e-6);
    }
}
