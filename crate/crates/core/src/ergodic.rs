//! Birkhoff-average diagnostics across initial conditions and shadowing of
//! su-legs by orbits of the skew product.
//!
//! Base orbits run exactly on the dyadic lattice `(Z / 2^52)²`, where the
//! integer matrix acts without rounding; only the fiber coordinate carries
//! floating-point error.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

use crate::anosov::{LeafKind, Leg, LinearAnosov};
use crate::error::{Error, Result};
use crate::fiber::SkewProduct;
use crate::holonomy::{holonomy, FiberTransform, DEFAULT_TOL};
use crate::torus::{torus_dist, FiberRegion, TorusPoint};

pub const BASE_BITS: u32 = 52;
const MASK: u64 = (1 << BASE_BITS) - 1;
const SCALE: f64 = (1u64 << BASE_BITS) as f64;
/// `σ(n) < σ(n/4) / DECAY_FACTOR` is reported as ergodic-like.
pub const DECAY_FACTOR: f64 = 1.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Observable {
    Constant { value: f64 },
    /// `cos 2π y₁`
    FiberCos,
    /// `cos 2π x₁`
    BaseCos,
    /// `cos 2π x₁ · cos 2π y₁`
    Product,
}

impl Observable {
    pub fn eval(&self, x: &TorusPoint, y: &TorusPoint) -> f64 {
        match self {
            Observable::Constant { value } => *value,
            Observable::FiberCos => (TAU * y.u).cos(),
            Observable::BaseCos => (TAU * x.u).cos(),
            Observable::Product => (TAU * x.u).cos() * (TAU * y.u).cos(),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Observable::Constant { .. } => "constant",
            Observable::FiberCos => "fiber_cos",
            Observable::BaseCos => "base_cos",
            Observable::Product => "product",
        }
    }
}

/// A base point on the dyadic lattice.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DyadicPoint(pub u64, pub u64);

impl DyadicPoint {
    /// Nearest lattice point.
    pub fn nearest(p: &TorusPoint) -> DyadicPoint {
        let r = |t: f64| ((t * SCALE).round() as u64) & MASK;
        DyadicPoint(r(p.u), r(p.v))
    }

    pub fn to_point(self) -> TorusPoint {
        TorusPoint {
            u: self.0 as f64 / SCALE,
            v: self.1 as f64 / SCALE,
        }
    }

    pub fn mapped(self, m: &[[i64; 2]; 2]) -> DyadicPoint {
        let c = |a: i64, b: i64| (a as u64).wrapping_mul(self.0).wrapping_add((b as u64).wrapping_mul(self.1)) & MASK;
        DyadicPoint(c(m[0][0], m[0][1]), c(m[1][0], m[1][1]))
    }
}

fn orbit_sums(
    sp: &SkewProduct,
    obs: &Observable,
    x: DyadicPoint,
    y: TorusPoint,
    checkpoints: &[usize],
) -> Result<Vec<f64>> {
    let m = sp.base.matrix;
    let (mut bx, mut fy) = (x, y);
    let mut sum = 0.0;
    let mut out = Vec::with_capacity(checkpoints.len());
    let mut next = 0;
    let last = *checkpoints.last().unwrap_or(&0);
    for k in 0..last {
        let p = bx.to_point();
        sum += obs.eval(&p, &fy);
        fy = sp.fiber_map(&p, &fy)?;
        bx = bx.mapped(&m);
        while next < checkpoints.len() && checkpoints[next] == k + 1 {
            out.push(sum / (k + 1) as f64);
            next += 1;
        }
    }
    Ok(out)
}

/// `(1/n) Σ_{k<n} φ(F^k(x, y))`, with `x` snapped to the dyadic lattice.
pub fn birkhoff(sp: &SkewProduct, obs: &Observable, x: &TorusPoint, y: &TorusPoint, n: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidInput("birkhoff needs n ≥ 1".into()));
    }
    Ok(orbit_sums(sp, obs, DyadicPoint::nearest(x), *y, &[n])?[0])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErgodicVerdict {
    ErgodicLike,
    NonErgodicLike,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErgodicReport {
    pub observable: String,
    pub n_iterations: usize,
    pub n_initial_conditions: usize,
    pub seed: u64,
    /// Per-IC averages at `n`.
    pub averages: Vec<f64>,
    /// `(checkpoint, σ)` at `n/4, n/2, n`.
    pub deviation: Vec<(usize, f64)>,
    /// `σ(n) / σ(n/4)`.
    pub ratio: f64,
    pub decay_factor: f64,
    pub verdict: ErgodicVerdict,
}

fn std_dev(xs: &[f64]) -> f64 {
    let m = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / m;
    (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / m).sqrt()
}

/// Cross-IC spread of Birkhoff averages; ICs are uniform on the base lattice
/// and uniform in `fiber_region` (the whole fiber when `None`).
pub fn ergodic_scan_in(
    sp: &SkewProduct,
    obs: &Observable,
    n: usize,
    m_ics: usize,
    seed: u64,
    fiber_region: Option<&FiberRegion>,
) -> Result<ErgodicReport> {
    if m_ics < 2 {
        return Err(Error::InvalidInput(format!("need at least 2 initial conditions, got {m_ics}")));
    }
    if n < 4 {
        return Err(Error::InvalidInput(format!("need n ≥ 4, got {n}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rect = fiber_region.map(FiberRegion::bounding_rect);
    let ics: Vec<(DyadicPoint, TorusPoint)> = (0..m_ics)
        .map(|_| {
            let x = DyadicPoint(rng.gen::<u64>() & MASK, rng.gen::<u64>() & MASK);
            let y = match (fiber_region, &rect) {
                (Some(region), Some(r)) => loop {
                    let p = [rng.gen_range(r.u_min..r.u_max), rng.gen_range(r.v_min..r.v_max)];
                    if region.contains_lift(p) {
                        break TorusPoint::from_lift(p);
                    }
                },
                _ => TorusPoint {
                    u: rng.gen(),
                    v: rng.gen(),
                },
            };
            (x, y)
        })
        .collect();
    let checkpoints = [n / 4, n / 2, n];
    let sums = ics
        .par_iter()
        .map(|(x, y)| orbit_sums(sp, obs, *x, *y, &checkpoints))
        .collect::<Result<Vec<_>>>()?;
    let deviation: Vec<(usize, f64)> = (0..3)
        .map(|c| {
            let col: Vec<f64> = sums.iter().map(|s| s[c]).collect();
            (checkpoints[c], std_dev(&col))
        })
        .collect();
    let ratio = deviation[2].1 / deviation[0].1;
    let verdict = if deviation[2].1 < deviation[0].1 / DECAY_FACTOR {
        ErgodicVerdict::ErgodicLike
    } else {
        ErgodicVerdict::NonErgodicLike
    };
    Ok(ErgodicReport {
        observable: obs.name().to_string(),
        n_iterations: n,
        n_initial_conditions: m_ics,
        seed,
        averages: sums.iter().map(|s| s[2]).collect(),
        deviation,
        ratio,
        decay_factor: DECAY_FACTOR,
        verdict,
    })
}

pub fn ergodic_scan(sp: &SkewProduct, obs: &Observable, n: usize, m_ics: usize, seed: u64) -> Result<ErgodicReport> {
    ergodic_scan_in(sp, obs, n, m_ics, seed, None)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShadowTable {
    pub leg: Leg,
    /// `dist(F^{±k}(x, v), F^{±k}(y, H(v)))` for `k = 0..=n_max`.
    pub distances: Vec<f64>,
    /// Geometric decay rate fitted to the distances above round-off.
    pub ratio: f64,
    pub bound: f64,
}

fn fit_ratio(d: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = d
        .iter()
        .enumerate()
        .filter(|(_, &v)| v > 1e-13)
        .map(|(k, &v)| (k as f64, v.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Some((sxy / sxx).exp())
}

fn contraction_along(a: &LinearAnosov, kind: LeafKind) -> f64 {
    match kind {
        LeafKind::Stable => a.contraction(),
        LeafKind::Unstable => 1.0 / a.expansion(),
    }
}

/// Follows `(x, v)` and `(y, H(v))` forward (stable legs) or backward
/// (unstable legs) and checks that they converge at the base contraction rate.
pub fn shadow_check(sp: &std::sync::Arc<SkewProduct>, leg: &Leg, v: &TorusPoint, n_max: usize) -> Result<ShadowTable> {
    let a = &sp.base;
    let s = a.on_leaf(&leg.from, &leg.to, leg.kind)?;
    let e = a.direction(leg.kind);
    let hv = holonomy(sp, leg, DEFAULT_TOL)?.apply(v)?;
    let lambda = contraction_along(a, leg.kind);
    let bound = lambda + 0.1;
    let (mut bx, mut fx, mut fy) = (leg.from, *v, hv);
    let mut off = s;
    let mut distances = Vec::with_capacity(n_max + 1);
    for k in 0..=n_max {
        let by = if k == 0 { leg.to } else { bx.shifted([off * e[0], off * e[1]]) };
        let db = torus_dist(&bx, &by);
        let df = torus_dist(&fx, &fy);
        distances.push(db.hypot(df));
        if k == n_max {
            break;
        }
        match leg.kind {
            LeafKind::Stable => {
                fx = sp.fiber_map(&bx, &fx)?;
                fy = sp.fiber_map(&by, &fy)?;
                bx = a.apply(&bx);
                off *= a.lambda_s;
            }
            LeafKind::Unstable => {
                bx = a.apply_inverse(&bx);
                off /= a.lambda_u;
                let by = bx.shifted([off * e[0], off * e[1]]);
                fx = sp.fiber_inverse(&bx, &fx)?;
                fy = sp.fiber_inverse(&by, &fy)?;
            }
        }
    }
    if distances[0] == 0.0 {
        return Ok(ShadowTable {
            leg: *leg,
            distances,
            ratio: 0.0,
            bound,
        });
    }
    let ratio = fit_ratio(&distances).unwrap_or(0.0);
    // eventual monotonicity over the second half, above round-off
    let tail = &distances[distances.len() / 2..];
    let monotone = tail.windows(2).all(|w| w[1] <= w[0] || w[1] < 1e-12);
    if !(ratio <= bound) || !monotone {
        return Err(Error::ShadowFailure(format!(
            "fitted ratio {ratio:.4} (bound {bound:.4}), eventually monotone: {monotone}"
        )));
    }
    Ok(ShadowTable {
        leg: *leg,
        distances,
        ratio,
        bound,
    })
}
