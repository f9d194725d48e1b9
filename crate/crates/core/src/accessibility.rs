//! Loop maps around heteroclinic quads, their fixed points, and orbit
//! exploration of center accessibility classes restricted to one fiber.

use std::collections::HashSet;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::anosov::HeteroclinicQuad;
use crate::error::{Error, Result};
use crate::fiber::{singular_values, FiberMap, Mat2, SkewProduct};
pub use crate::holonomy::{FiberTransform, SuPath};
use crate::holonomy::{project_su, SuMap};
use crate::torus::{delta, norm, torus_dist, FiberRect, TorusPoint};

pub const FIXED_POINT_GRID: usize = 64;
pub const NEWTON_MAX_ITER: usize = 50;
pub const DEFAULT_WORD_LENGTH: usize = 12;
pub const TRIVIAL_DIAMETER: f64 = 1e-6;
/// Dyadic levels `j` (box side `2^-j`) used by the dimension estimate.
pub const BOX_LEVELS: std::ops::RangeInclusive<u32> = 3..=8;

impl FiberTransform for FiberMap {
    fn apply(&self, y: &TorusPoint) -> Result<TorusPoint> {
        Ok(FiberMap::apply(self, y))
    }

    fn apply_inverse(&self, y: &TorusPoint) -> Result<TorusPoint> {
        Ok(FiberMap::apply_inverse(self, y))
    }
}

/// `ℓ_i`: holonomy around `x →u z_i →s p_i →u w_i →s x`, a self-map of the fiber over `x`.
#[derive(Debug, Clone)]
pub struct LoopMap {
    pub quad: HeteroclinicQuad,
    /// 1 or 2.
    pub index: usize,
    pub map: SuMap,
    pub tol: f64,
}

impl FiberTransform for LoopMap {
    fn apply(&self, y: &TorusPoint) -> Result<TorusPoint> {
        self.map.apply(y)
    }

    fn apply_inverse(&self, y: &TorusPoint) -> Result<TorusPoint> {
        self.map.apply_inverse(y)
    }
}

pub fn loop_map(sp: &Arc<SkewProduct>, quad: &HeteroclinicQuad, i: usize, tol: f64) -> Result<LoopMap> {
    if i != 1 && i != 2 {
        return Err(Error::InvalidInput(format!("loop index must be 1 or 2, got {i}")));
    }
    let path = SuPath::new(quad.loop_legs(i - 1).to_vec());
    Ok(LoopMap {
        quad: quad.clone(),
        index: i,
        map: project_su(sp, &path, tol)?,
        tol,
    })
}

/// Both loop maps of every quad, in order.
pub fn loop_generators(sp: &Arc<SkewProduct>, quads: &[HeteroclinicQuad], tol: f64) -> Result<Vec<LoopMap>> {
    let mut out = Vec::with_capacity(2 * quads.len());
    for q in quads {
        for i in 1..=2 {
            out.push(loop_map(sp, q, i, tol)?);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "result", content = "points", rename_all = "snake_case")]
pub enum FixedPoints {
    Points(Vec<TorusPoint>),
    /// More than half of the seed grid is already fixed.
    IdentityLike,
}

fn displacement(map: &dyn FiberTransform, q: [f64; 2]) -> Result<[f64; 2]> {
    let p = TorusPoint::from_lift(q);
    Ok(delta(&map.apply(&p)?, &p))
}

/// Central finite-difference Jacobian of a fiber self-map in lifted coordinates.
pub fn fd_jacobian(map: &dyn FiberTransform, y: &TorusPoint, h: f64) -> Result<Mat2> {
    let mut j = [[0.0; 2]; 2];
    for c in 0..2 {
        let mut e = [0.0; 2];
        e[c] = h;
        let (a, b) = (y.shifted(e), y.shifted([-e[0], -e[1]]));
        let (fa, fb) = (map.apply(&a)?, map.apply(&b)?);
        let d = delta(&fa, &fb);
        for r in 0..2 {
            j[r][c] = d[r] / (2.0 * h);
        }
    }
    Ok(j)
}

fn newton(map: &dyn FiberTransform, seed: [f64; 2], region: &FiberRect, margin: f64, tol: f64) -> Result<Option<[f64; 2]>> {
    let h = 1e-6;
    let mut q = seed;
    for _ in 0..NEWTON_MAX_ITER {
        let f = displacement(map, q)?;
        if norm(f) < tol {
            return Ok(Some(q));
        }
        let mut j = [[0.0; 2]; 2];
        for c in 0..2 {
            let (mut a, mut b) = (q, q);
            a[c] += h;
            b[c] -= h;
            let (fa, fb) = (displacement(map, a)?, displacement(map, b)?);
            for r in 0..2 {
                j[r][c] = (fa[r] - fb[r]) / (2.0 * h);
            }
        }
        let d = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        if d.abs() < 1e-10 {
            return bisect(map, seed, region, tol);
        }
        let mut dq = [
            (j[1][1] * f[0] - j[0][1] * f[1]) / d,
            (j[0][0] * f[1] - j[1][0] * f[0]) / d,
        ];
        let step = norm(dq);
        if step > 0.05 {
            dq = [dq[0] * 0.05 / step, dq[1] * 0.05 / step];
        }
        q = [q[0] - dq[0], q[1] - dq[1]];
        let inside = q[0] >= region.u_min - margin
            && q[0] <= region.u_max + margin
            && q[1] >= region.v_min - margin
            && q[1] <= region.v_max + margin;
        if !inside {
            return Ok(None);
        }
    }
    Ok(None)
}

/// Descends `|L − id|` over nested subcells of the seed cell.
fn bisect(map: &dyn FiberTransform, seed: [f64; 2], region: &FiberRect, tol: f64) -> Result<Option<[f64; 2]>> {
    let mut half = [
        (region.u_max - region.u_min) / (2.0 * FIXED_POINT_GRID as f64),
        (region.v_max - region.v_min) / (2.0 * FIXED_POINT_GRID as f64),
    ];
    let mut c = seed;
    let mut best = norm(displacement(map, c)?);
    for _ in 0..60 {
        if best < tol {
            return Ok(Some(c));
        }
        half = [half[0] / 2.0, half[1] / 2.0];
        let mut next = c;
        for (su, sv) in [(-1.0, -1.0), (1.0, -1.0), (-1.0, 1.0), (1.0, 1.0)] {
            let cand = [c[0] + su * half[0], c[1] + sv * half[1]];
            let r = norm(displacement(map, cand)?);
            if r < best {
                best = r;
                next = cand;
            }
        }
        c = next;
    }
    Ok(if best < tol { Some(c) } else { None })
}

/// Fixed points of `map` in `region` with residual below `tol`, found by Newton
/// from a 64×64 seed grid and deduplicated at radius `10·tol`.
pub fn find_fixed_points(map: &dyn FiberTransform, region: &FiberRect, tol: f64) -> Result<FixedPoints> {
    let seeds = region.grid(FIXED_POINT_GRID);
    let fixed_seeds = seeds
        .par_iter()
        .map(|s| displacement(map, *s).map(|f| norm(f) < tol))
        .collect::<Result<Vec<bool>>>()?
        .into_iter()
        .filter(|&b| b)
        .count();
    if 2 * fixed_seeds > seeds.len() {
        return Ok(FixedPoints::IdentityLike);
    }
    let margin = 10.0 * tol;
    let diag = (region.u_max - region.u_min).hypot(region.v_max - region.v_min) / FIXED_POINT_GRID as f64;
    let found = seeds
        .par_iter()
        .map(|s| {
            // a zero inside the seed's cell forces a displacement within the
            // local Lipschitz bound of L − id
            let p = TorusPoint::from_lift(*s);
            let f = norm(displacement(map, *s)?);
            let lip = singular_values(&fd_jacobian(map, &p, 1e-6)?).0 + 1.0;
            if f > 2.0 * lip * diag {
                return Ok(None);
            }
            newton(map, *s, region, margin, tol)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut out: Vec<TorusPoint> = Vec::new();
    for q in found.into_iter().flatten() {
        let p = TorusPoint::from_lift(q);
        if !out.iter().any(|o| torus_dist(o, &p) < 10.0 * tol) {
            out.push(p);
        }
    }
    Ok(FixedPoints::Points(out))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassDiagnostics {
    pub diameter: f64,
    pub box_dimension_estimate: Option<f64>,
    /// Dyadic levels that entered the estimate.
    pub scales_used: Vec<u32>,
    pub box_counts: Vec<(u32, usize)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassSample {
    pub seed: TorusPoint,
    pub points: Vec<TorusPoint>,
    pub generators_used: usize,
    pub diagnostics: ClassDiagnostics,
}

fn diameter(points: &[TorusPoint]) -> f64 {
    points
        .par_iter()
        .enumerate()
        .map(|(i, a)| points[i + 1..].iter().map(|b| torus_dist(a, b)).fold(0.0, f64::max))
        .reduce(|| 0.0, f64::max)
}

fn box_count(points: &[TorusPoint], level: u32) -> usize {
    let m = (1u64 << level) as f64;
    let cells: HashSet<(u64, u64)> = points
        .iter()
        .map(|p| ((p.u * m).floor() as u64, (p.v * m).floor() as u64))
        .collect();
    cells.len()
}

/// Box-counting dimension using the levels whose mean occupancy is at least two.
pub fn diagnostics(points: &[TorusPoint]) -> ClassDiagnostics {
    let diameter = diameter(points);
    let box_counts: Vec<(u32, usize)> = BOX_LEVELS.map(|j| (j, box_count(points, j))).collect();
    let usable: Vec<(u32, usize)> = box_counts
        .iter()
        .copied()
        .filter(|&(_, n)| 2 * n <= points.len())
        .collect();
    let box_dimension_estimate = if usable.len() >= 2 {
        let xs: Vec<f64> = usable.iter().map(|&(j, _)| j as f64 * std::f64::consts::LN_2).collect();
        let ys: Vec<f64> = usable.iter().map(|&(_, n)| (n as f64).ln()).collect();
        let m = xs.len() as f64;
        let (mx, my) = (xs.iter().sum::<f64>() / m, ys.iter().sum::<f64>() / m);
        let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
        let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
        Some(sxy / sxx)
    } else {
        None
    };
    ClassDiagnostics {
        diameter,
        box_dimension_estimate,
        scales_used: usable.iter().map(|&(j, _)| j).collect(),
        box_counts,
    }
}

impl ClassSample {
    pub fn new(seed: TorusPoint, points: Vec<TorusPoint>, generators_used: usize) -> ClassSample {
        let diagnostics = diagnostics(&points);
        ClassSample {
            seed,
            points,
            generators_used,
            diagnostics,
        }
    }
}

fn quantize(p: &TorusPoint) -> (i64, i64) {
    const Q: f64 = 1e9;
    let k = Q as i64;
    (((p.u * Q).round() as i64).rem_euclid(k), ((p.v * Q).round() as i64).rem_euclid(k))
}

/// Breadth-first orbit of `seed` under the generators and their inverses, up to
/// words of length `word_length`, capped at `k` points.
pub fn explore_with(gens: &[&dyn FiberTransform], seed: TorusPoint, k: usize, word_length: usize) -> Result<ClassSample> {
    let mut seen = HashSet::from([quantize(&seed)]);
    let mut points = vec![seed];
    let mut frontier = vec![seed];
    for _ in 0..word_length {
        if points.len() >= k || frontier.is_empty() {
            break;
        }
        let images = frontier
            .par_iter()
            .map(|p| {
                let mut v = Vec::with_capacity(2 * gens.len());
                for g in gens {
                    v.push(g.apply(p)?);
                    v.push(g.apply_inverse(p)?);
                }
                Ok(v)
            })
            .collect::<Result<Vec<_>>>()?;
        let mut next = Vec::new();
        'merge: for q in images.into_iter().flatten() {
            if seen.insert(quantize(&q)) {
                points.push(q);
                next.push(q);
                if points.len() >= k {
                    break 'merge;
                }
            }
        }
        frontier = next;
    }
    Ok(ClassSample::new(seed, points, gens.len()))
}

pub fn explore_class(
    sp: &Arc<SkewProduct>,
    quads: &[HeteroclinicQuad],
    seed: TorusPoint,
    k: usize,
    word_length: usize,
    tol: f64,
) -> Result<ClassSample> {
    let gens = loop_generators(sp, quads, tol)?;
    let refs: Vec<&dyn FiberTransform> = gens.iter().map(|g| g as &dyn FiberTransform).collect();
    explore_with(&refs, seed, k, word_length)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassKind {
    Trivial,
    Curve,
    Open,
    Indeterminate,
}

impl ClassKind {
    pub fn name(self) -> &'static str {
        match self {
            ClassKind::Trivial => "trivial",
            ClassKind::Curve => "curve",
            ClassKind::Open => "open",
            ClassKind::Indeterminate => "indeterminate",
        }
    }
}

pub fn classify_class(sample: &ClassSample) -> ClassKind {
    let d = &sample.diagnostics;
    if d.diameter < TRIVIAL_DIAMETER {
        return ClassKind::Trivial;
    }
    match d.box_dimension_estimate {
        Some(e) if (0.75..=1.25).contains(&e) => ClassKind::Curve,
        Some(e) if e > 1.6 => ClassKind::Open,
        _ => ClassKind::Indeterminate,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrivialScan {
    pub grid: Vec<TorusPoint>,
    /// `max_L dist(L(y), y)` per grid point.
    pub max_displacement: Vec<f64>,
    pub fixed: Vec<TorusPoint>,
}

impl TrivialScan {
    pub fn fixed_fraction(&self) -> f64 {
        self.fixed.len() as f64 / self.grid.len().max(1) as f64
    }
}

/// Points of `grid` moved by less than `tol` by every generator.
pub fn trivial_set_scan_with(gens: &[&dyn FiberTransform], grid: Vec<TorusPoint>, tol: f64) -> Result<TrivialScan> {
    let max_displacement = grid
        .par_iter()
        .map(|y| {
            gens.iter()
                .map(|g| g.apply(y).map(|gy| torus_dist(&gy, y)))
                .try_fold(0.0, |m, d| d.map(|d| f64::max(m, d)))
        })
        .collect::<Result<Vec<f64>>>()?;
    let fixed = grid
        .iter()
        .zip(&max_displacement)
        .filter(|(_, &d)| d < tol)
        .map(|(p, _)| *p)
        .collect();
    Ok(TrivialScan {
        grid,
        max_displacement,
        fixed,
    })
}

pub fn trivial_set_scan(
    sp: &Arc<SkewProduct>,
    quads: &[HeteroclinicQuad],
    fiber_grid_n: usize,
    tol: f64,
) -> Result<TrivialScan> {
    let gens = loop_generators(sp, quads, tol)?;
    let refs: Vec<&dyn FiberTransform> = gens.iter().map(|g| g as &dyn FiberTransform).collect();
    let grid = FiberRect::unit()
        .grid(fiber_grid_n)
        .into_iter()
        .map(TorusPoint::from_lift)
        .collect();
    trivial_set_scan_with(&refs, grid, tol)
}
