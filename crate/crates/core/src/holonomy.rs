//! Stable and unstable fiber holonomies of a skew product as certified limits
//! of finite cocycle compositions, and their compositions along su-paths.
//!
//! For `y ∈ W^s(x)` the stable holonomy is `lim_n (G^n_y)^{-1} ∘ G^n_x` with
//! `G^n_x = g_{A^{n-1}x} ∘ … ∘ g_x`; the unstable one runs the same limit with
//! backward cocycles.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::anosov::{LeafKind, Leg, LEAF_TOL};
use crate::error::{Error, Result};
use crate::fiber::SkewProduct;
use crate::torus::{torus_dist, FiberRect, TorusPoint};

/// Hard cap on the number of compositions.
pub const N_MAX: usize = 200;
/// Default Cauchy tolerance.
pub const DEFAULT_TOL: f64 = 1e-10;
/// Side of the fiber grid used for the Cauchy certificate.
pub const CAUCHY_GRID: usize = 32;

/// A fiber map that may be evaluated and inverted pointwise.
pub trait FiberTransform: Sync {
    fn apply(&self, y: &TorusPoint) -> Result<TorusPoint>;
    fn apply_inverse(&self, y: &TorusPoint) -> Result<TorusPoint>;
}

/// Truncated holonomy between the fibers over `from_base` and `to_base`.
#[derive(Debug, Clone)]
pub struct HolonomyMap {
    pub sp: Arc<SkewProduct>,
    pub from_base: TorusPoint,
    pub to_base: TorusPoint,
    pub kind: LeafKind,
    pub truncation_n: usize,
    pub certified_tol: f64,
    /// `sup_grid dist(H_n, H_{n+1})` for `n = 0..=truncation_n`.
    pub increments: Vec<f64>,
    /// Base orbits: forward `A^k` (stable, k = 0..) or backward `A^{-k}` (unstable, k = 1..).
    from_orbit: Vec<TorusPoint>,
    to_orbit: Vec<TorusPoint>,
}

fn base_orbits(
    sp: &SkewProduct,
    x: &TorusPoint,
    y: &TorusPoint,
    kind: LeafKind,
    len: usize,
) -> Result<(Vec<TorusPoint>, Vec<TorusPoint>)> {
    let a = &sp.base;
    let offset = a.on_leaf(x, y, kind)?;
    let e = a.direction(kind);
    let mut xs = Vec::with_capacity(len);
    let mut ys = Vec::with_capacity(len);
    match kind {
        LeafKind::Stable => {
            // the partner point is carried as an exact leaf offset from the x-orbit
            let mut bx = *x;
            let mut s = offset;
            for k in 0..len {
                xs.push(bx);
                ys.push(if k == 0 { *y } else { bx.shifted([s * e[0], s * e[1]]) });
                bx = a.apply(&bx);
                s *= a.lambda_s;
            }
        }
        LeafKind::Unstable => {
            let mut bx = *x;
            let mut s = offset;
            for _ in 0..len {
                bx = a.apply_inverse(&bx);
                s /= a.lambda_u;
                xs.push(bx);
                ys.push(bx.shifted([s * e[0], s * e[1]]));
            }
        }
    }
    Ok((xs, ys))
}

impl HolonomyMap {
    fn build(sp: &Arc<SkewProduct>, x: TorusPoint, y: TorusPoint, kind: LeafKind, tol: f64) -> Result<HolonomyMap> {
        if !(tol > 0.0) {
            return Err(Error::InvalidInput(format!("holonomy tolerance must be positive, got {tol}")));
        }
        let (from_orbit, to_orbit) = base_orbits(sp, &x, &y, kind, N_MAX + 2)?;
        let mut h = HolonomyMap {
            sp: Arc::clone(sp),
            from_base: x,
            to_base: y,
            kind,
            truncation_n: 0,
            certified_tol: tol,
            increments: Vec::new(),
            from_orbit,
            to_orbit,
        };
        let offset = sp.base.on_leaf(&x, &y, kind)?.abs();
        let rate = match kind {
            LeafKind::Stable => sp.base.contraction(),
            LeafKind::Unstable => 1.0 / sp.base.expansion(),
        };
        let lip = sp.family.base_lipschitz();
        let grid: Vec<TorusPoint> = FiberRect::unit()
            .grid(CAUCHY_GRID)
            .into_iter()
            .map(TorusPoint::from_lift)
            .collect();
        let mut prev: Vec<TorusPoint> = grid.clone();
        // the from-side composition is advanced one map per level and cached
        let mut from_part: Vec<TorusPoint> = grid;
        let mut last = f64::INFINITY;
        for n in 0..=N_MAX {
            from_part = from_part
                .par_iter()
                .map(|a| h.from_step(n, a))
                .collect::<Result<_>>()?;
            let next: Vec<TorusPoint> = from_part
                .par_iter()
                .map(|a| h.to_part(n + 1, a))
                .collect::<Result<_>>()?;
            let inc = prev
                .iter()
                .zip(&next)
                .map(|(a, b)| torus_dist(a, b))
                .fold(0.0, f64::max);
            h.increments.push(inc);
            last = inc;
            // plateaus of the field give exact zeros; the leaf separation bound
            // guards against stopping on one
            let tail = lip * offset * rate.powi(n as i32);
            if inc < tol && tail < tol {
                h.truncation_n = n;
                return Ok(h);
            }
            prev = next;
        }
        Err(Error::NoConvergence {
            cap: N_MAX,
            last_increment: last,
        })
    }

    /// The `k`-th map of the from-side composition.
    fn from_step(&self, k: usize, a: &TorusPoint) -> Result<TorusPoint> {
        let bx = &self.from_orbit[k];
        match self.kind {
            LeafKind::Stable => self.sp.fiber_map(bx, a),
            LeafKind::Unstable => self.sp.fiber_inverse(bx, a),
        }
    }

    /// The to-side composition of length `n`, applied last.
    fn to_part(&self, n: usize, a: &TorusPoint) -> Result<TorusPoint> {
        let mut w = *a;
        for by in self.to_orbit[..n].iter().rev() {
            w = match self.kind {
                LeafKind::Stable => self.sp.fiber_inverse(by, &w)?,
                LeafKind::Unstable => self.sp.fiber_map(by, &w)?,
            };
        }
        Ok(w)
    }

    /// `H_n(v)` for an explicit truncation level.
    pub fn eval_truncated(&self, n: usize, v: &TorusPoint) -> Result<TorusPoint> {
        let mut w = *v;
        for k in 0..n {
            w = self.from_step(k, &w)?;
        }
        self.to_part(n, &w)
    }

    /// `H_n^{-1}(v)` at an explicit truncation level.
    pub fn eval_truncated_inverse(&self, n: usize, v: &TorusPoint) -> Result<TorusPoint> {
        let sp = &self.sp;
        let mut w = *v;
        match self.kind {
            LeafKind::Stable => {
                for by in &self.to_orbit[..n] {
                    w = sp.fiber_map(by, &w)?;
                }
                for bx in self.from_orbit[..n].iter().rev() {
                    w = sp.fiber_inverse(bx, &w)?;
                }
            }
            LeafKind::Unstable => {
                for by in &self.to_orbit[..n] {
                    w = sp.fiber_inverse(by, &w)?;
                }
                for bx in self.from_orbit[..n].iter().rev() {
                    w = sp.fiber_map(bx, &w)?;
                }
            }
        }
        Ok(w)
    }

    /// The reverse holonomy at the same truncation.
    pub fn inverse(&self) -> HolonomyMap {
        HolonomyMap {
            sp: Arc::clone(&self.sp),
            from_base: self.to_base,
            to_base: self.from_base,
            kind: self.kind,
            truncation_n: self.truncation_n,
            certified_tol: self.certified_tol,
            increments: self.increments.clone(),
            from_orbit: self.to_orbit.clone(),
            to_orbit: self.from_orbit.clone(),
        }
    }

    /// Geometric decay rate of the Cauchy increments: `exp` of the least-squares
    /// slope of `ln(increment)` over the increments above round-off.
    pub fn cauchy_ratio(&self) -> Option<f64> {
        let pts: Vec<(f64, f64)> = self
            .increments
            .iter()
            .enumerate()
            .filter(|(_, &d)| d > 1e-15)
            .map(|(n, &d)| (n as f64, d.ln()))
            .collect();
        if pts.len() < 3 {
            return None;
        }
        let m = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        Some((sxy / sxx).exp())
    }
}

impl FiberTransform for HolonomyMap {
    fn apply(&self, y: &TorusPoint) -> Result<TorusPoint> {
        self.eval_truncated(self.truncation_n, y)
    }

    fn apply_inverse(&self, y: &TorusPoint) -> Result<TorusPoint> {
        self.eval_truncated_inverse(self.truncation_n, y)
    }
}

/// Holonomy along the local stable leaf from the fiber over `x` to that over `y`.
pub fn stable_holonomy(sp: &Arc<SkewProduct>, x: TorusPoint, y: TorusPoint, tol: f64) -> Result<HolonomyMap> {
    HolonomyMap::build(sp, x, y, LeafKind::Stable, tol)
}

/// Holonomy along the local unstable leaf from the fiber over `x` to that over `y`.
pub fn unstable_holonomy(sp: &Arc<SkewProduct>, x: TorusPoint, y: TorusPoint, tol: f64) -> Result<HolonomyMap> {
    HolonomyMap::build(sp, x, y, LeafKind::Unstable, tol)
}

pub fn holonomy(sp: &Arc<SkewProduct>, leg: &Leg, tol: f64) -> Result<HolonomyMap> {
    HolonomyMap::build(sp, leg.from, leg.to, leg.kind, tol)
}

/// An su-path: consecutive local leaf legs sharing endpoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuPath {
    pub legs: Vec<Leg>,
}

impl SuPath {
    pub fn new(legs: Vec<Leg>) -> SuPath {
        SuPath { legs }
    }

    pub fn is_loop(&self) -> bool {
        match (self.legs.first(), self.legs.last()) {
            (Some(a), Some(b)) => a.from.approx_eq(&b.to) || torus_dist(&a.from, &b.to) < LEAF_TOL,
            _ => true,
        }
    }

    /// Checks chaining and leaf membership of every leg.
    pub fn validate(&self, sp: &SkewProduct) -> Result<()> {
        for (i, leg) in self.legs.iter().enumerate() {
            let (_, residual) = sp.base.leaf_coordinate(&leg.from, &leg.to, leg.kind);
            if residual >= LEAF_TOL {
                return Err(Error::BrokenPath(format!(
                    "leg {i} endpoints are not on a common {} leaf (residual {residual:e})",
                    leg.kind.name()
                )));
            }
            if let Some(next) = self.legs.get(i + 1) {
                let gap = torus_dist(&leg.to, &next.from);
                if gap >= LEAF_TOL {
                    return Err(Error::BrokenPath(format!(
                        "leg {i} ends {gap:e} away from the start of leg {}",
                        i + 1
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Ordered composition of leg holonomies along an su-path.
#[derive(Debug, Clone)]
pub struct SuMap {
    pub legs: Vec<HolonomyMap>,
}

impl FiberTransform for SuMap {
    fn apply(&self, y: &TorusPoint) -> Result<TorusPoint> {
        let mut w = *y;
        for h in &self.legs {
            w = h.apply(&w)?;
        }
        Ok(w)
    }

    fn apply_inverse(&self, y: &TorusPoint) -> Result<TorusPoint> {
        let mut w = *y;
        for h in self.legs.iter().rev() {
            w = h.apply_inverse(&w)?;
        }
        Ok(w)
    }
}

/// `Π^{su}` along a path: the composition of its leg holonomies.
pub fn project_su(sp: &Arc<SkewProduct>, path: &SuPath, tol: f64) -> Result<SuMap> {
    path.validate(sp)?;
    let legs = path
        .legs
        .iter()
        .map(|leg| holonomy(sp, leg, tol))
        .collect::<Result<Vec<_>>>()?;
    Ok(SuMap { legs })
}
