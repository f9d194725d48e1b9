//! Linear hyperbolic toral automorphisms: eigen-data, local leaves, the local
//! product bracket, exact periodic points and heteroclinic quadrilaterals.

use num_integer::Integer;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::torus::{delta, norm, torus_dist, TorusPoint};

/// Residual allowed for eigenpairs and leaf memberships.
pub const LEAF_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LeafKind {
    Stable,
    Unstable,
}

impl LeafKind {
    pub fn name(self) -> &'static str {
        match self {
            LeafKind::Stable => "stable",
            LeafKind::Unstable => "unstable",
        }
    }
}

/// A hyperbolic element of GL(2, ℤ) acting on ℝ²/ℤ².
///
/// `lambda_u`/`lambda_s` are the signed eigenvalues; their magnitudes lie in
/// `(1, ∞)` and `(0, 1)` and their product is `det`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearAnosov {
    pub matrix: [[i64; 2]; 2],
    pub lambda_u: f64,
    pub lambda_s: f64,
    pub e_u: [f64; 2],
    pub e_s: [f64; 2],
}

fn unit(v: [f64; 2]) -> [f64; 2] {
    let n = norm(v);
    let mut e = [v[0] / n, v[1] / n];
    // fix orientation so the first nonzero component is positive
    if e[0] < 0.0 || (e[0] == 0.0 && e[1] < 0.0) {
        e = [-e[0], -e[1]];
    }
    e
}

fn eigenvector(m: [[i64; 2]; 2], lambda: f64) -> [f64; 2] {
    let (a, b, c, d) = (m[0][0] as f64, m[0][1] as f64, m[1][0] as f64, m[1][1] as f64);
    // rows of (M - λI) annihilate the eigenvector
    let v1 = [b, lambda - a];
    let v2 = [lambda - d, c];
    if norm(v1) >= norm(v2) {
        unit(v1)
    } else {
        unit(v2)
    }
}

fn mat_mul(a: [[i64; 2]; 2], b: [[i64; 2]; 2]) -> Result<[[i64; 2]; 2]> {
    let mut out = [[0i64; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            let mut acc: i64 = 0;
            for k in 0..2 {
                acc = a[i][k]
                    .checked_mul(b[k][j])
                    .and_then(|p| acc.checked_add(p))
                    .ok_or_else(|| Error::InvalidInput("matrix power overflows i64".into()))?;
            }
            out[i][j] = acc;
        }
    }
    Ok(out)
}

/// Cross product of two plane vectors.
#[inline]
pub fn cross(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

#[inline]
pub fn dot(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

impl LinearAnosov {
    pub fn det(&self) -> i64 {
        let m = self.matrix;
        m[0][0] * m[1][1] - m[0][1] * m[1][0]
    }

    pub fn trace(&self) -> i64 {
        self.matrix[0][0] + self.matrix[1][1]
    }

    /// Expansion rate `|lambda_u|`.
    pub fn expansion(&self) -> f64 {
        self.lambda_u.abs()
    }

    /// Contraction rate `|lambda_s|`.
    pub fn contraction(&self) -> f64 {
        self.lambda_s.abs()
    }

    pub fn inverse_matrix(&self) -> [[i64; 2]; 2] {
        let m = self.matrix;
        let d = self.det();
        [[d * m[1][1], -d * m[0][1]], [-d * m[1][0], d * m[0][0]]]
    }

    /// The automorphism `A^k`, `k ≥ 1`.
    pub fn power(&self, k: u32) -> Result<LinearAnosov> {
        if k == 0 {
            return Err(Error::InvalidInput("power must be >= 1".into()));
        }
        let mut acc = self.matrix;
        for _ in 1..k {
            acc = mat_mul(acc, self.matrix)?;
        }
        make_anosov(acc)
    }

    pub fn direction(&self, kind: LeafKind) -> [f64; 2] {
        match kind {
            LeafKind::Stable => self.e_s,
            LeafKind::Unstable => self.e_u,
        }
    }

    pub fn eigenvalue(&self, kind: LeafKind) -> f64 {
        match kind {
            LeafKind::Stable => self.lambda_s,
            LeafKind::Unstable => self.lambda_u,
        }
    }

    #[inline]
    pub fn apply_lift(&self, x: [f64; 2]) -> [f64; 2] {
        let m = self.matrix;
        [
            m[0][0] as f64 * x[0] + m[0][1] as f64 * x[1],
            m[1][0] as f64 * x[0] + m[1][1] as f64 * x[1],
        ]
    }

    #[inline]
    pub fn apply(&self, x: &TorusPoint) -> TorusPoint {
        TorusPoint::from_lift(self.apply_lift(x.lift()))
    }

    #[inline]
    pub fn apply_inverse(&self, x: &TorusPoint) -> TorusPoint {
        let m = self.inverse_matrix();
        TorusPoint::from_lift([
            m[0][0] as f64 * x.u + m[0][1] as f64 * x.v,
            m[1][0] as f64 * x.u + m[1][1] as f64 * x.v,
        ])
    }

    /// `A^n x` for any integer `n`.
    pub fn iterate(&self, x: &TorusPoint, n: i64) -> TorusPoint {
        let mut p = *x;
        if n >= 0 {
            for _ in 0..n {
                p = self.apply(&p);
            }
        } else {
            for _ in 0..(-n) {
                p = self.apply_inverse(&p);
            }
        }
        p
    }

    /// Signed leaf coordinate of `y` relative to `x` along the given leaf and the
    /// transverse residual.
    pub fn leaf_coordinate(&self, x: &TorusPoint, y: &TorusPoint, kind: LeafKind) -> (f64, f64) {
        let d = delta(y, x);
        let e = self.direction(kind);
        (dot(d, e), cross(e, d).abs())
    }

    /// Leaf coordinate of `y` on the local leaf through `x`, or `NotOnLeaf`.
    pub fn on_leaf(&self, x: &TorusPoint, y: &TorusPoint, kind: LeafKind) -> Result<f64> {
        let (t, residual) = self.leaf_coordinate(x, y, kind);
        if residual >= LEAF_TOL {
            return Err(Error::NotOnLeaf {
                kind: kind.name(),
                residual,
            });
        }
        Ok(t)
    }
}

/// Builds the eigen-data of an integer matrix, rejecting non-hyperbolic input.
pub fn make_anosov(matrix: [[i64; 2]; 2]) -> Result<LinearAnosov> {
    let det = matrix[0][0] * matrix[1][1] - matrix[0][1] * matrix[1][0];
    let tr = matrix[0][0] + matrix[1][1];
    if det.abs() != 1 {
        return Err(Error::NotAnosov(format!("|det| = {} != 1", det.abs())));
    }
    if tr.abs() <= 2 {
        return Err(Error::NotAnosov(format!("|trace| = {} <= 2", tr.abs())));
    }
    let t = tr as f64;
    let disc = ((tr * tr - 4 * det) as f64).sqrt();
    // numerically stable pair: compute the large root, derive the small one
    let big = if t > 0.0 { 0.5 * (t + disc) } else { 0.5 * (t - disc) };
    let small = det as f64 / big;
    Ok(LinearAnosov {
        matrix,
        lambda_u: big,
        lambda_s: small,
        e_u: eigenvector(matrix, big),
        e_s: eigenvector(matrix, small),
    })
}

/// The cat map `[[2,1],[1,1]]`.
pub fn cat_map() -> LinearAnosov {
    make_anosov([[2, 1], [1, 1]]).expect("cat map is hyperbolic")
}

/// Local stable or unstable leaf segment `t ↦ base + t·direction`, `|t| ≤ half_length`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LeafSegment {
    pub base: TorusPoint,
    pub kind: LeafKind,
    pub half_length: f64,
    pub direction: [f64; 2],
}

impl LeafSegment {
    pub fn point_at(&self, t: f64) -> TorusPoint {
        self.base.shifted([t * self.direction[0], t * self.direction[1]])
    }

    /// Distance from `p` to the segment (minimal image; valid for local segments).
    pub fn distance_to(&self, p: &TorusPoint) -> f64 {
        let d = delta(p, &self.base);
        let t = dot(d, self.direction).clamp(-self.half_length, self.half_length);
        norm([d[0] - t * self.direction[0], d[1] - t * self.direction[1]])
    }

    /// Image under the automorphism: base moves to `A·base`, length scales by the
    /// eigenvalue magnitude. Works for `A^{-1}` via `inverse = true`.
    pub fn mapped(&self, a: &LinearAnosov, inverse: bool) -> LeafSegment {
        let lam = a.eigenvalue(self.kind).abs();
        let (base, half_length) = if inverse {
            (a.apply_inverse(&self.base), self.half_length / lam)
        } else {
            (a.apply(&self.base), self.half_length * lam)
        };
        LeafSegment {
            base,
            kind: self.kind,
            half_length,
            direction: self.direction,
        }
    }
}

/// Local leaf of given kind through `x`.
pub fn leaf(a: &LinearAnosov, x: TorusPoint, kind: LeafKind, half_length: f64) -> Result<LeafSegment> {
    if !(half_length > 0.0 && half_length < 0.5) {
        return Err(Error::InvalidInput(format!(
            "local leaf half-length must lie in (0, 0.5), got {half_length}"
        )));
    }
    Ok(LeafSegment {
        base: x,
        kind,
        half_length,
        direction: a.direction(kind),
    })
}

/// The local point `W^s_loc(x) ∩ W^u_loc(y)`.
pub fn bracket(a: &LinearAnosov, x: &TorusPoint, y: &TorusPoint) -> Result<TorusPoint> {
    let dist = torus_dist(x, y);
    if !(dist < 0.25) {
        return Err(Error::AmbiguousBranch(dist));
    }
    let d0 = delta(y, x);
    let (es, eu) = (a.e_s, a.e_u);
    let det = cross(es, eu);
    let mut best: Option<(f64, f64)> = None;
    for i in -1..=1 {
        for j in -1..=1 {
            let d = [d0[0] + i as f64, d0[1] + j as f64];
            // s·e_s − u·e_u = d  (Cramer)
            let s = cross(d, eu) / det;
            let u = -cross(es, d) / det;
            let size = s.abs().max(u.abs());
            if best.is_none_or(|(bs, bu)| size < bs.abs().max(bu.abs())) {
                best = Some((s, u));
            }
        }
    }
    let (s, _) = best.expect("nine candidates");
    Ok(x.shifted([s * es[0], s * es[1]]))
}

/// Rational point `(num[0]/den, num[1]/den)` of the torus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RationalPoint {
    pub num: [i64; 2],
    pub den: i64,
}

impl RationalPoint {
    pub fn new(i: i64, j: i64, q: i64) -> RationalPoint {
        let g = i.gcd(&j).gcd(&q);
        let g = if g == 0 { 1 } else { g };
        RationalPoint {
            num: [(i / g).rem_euclid(q / g), (j / g).rem_euclid(q / g)],
            den: q / g,
        }
    }

    pub fn to_point(&self) -> TorusPoint {
        TorusPoint::from_lift([
            self.num[0] as f64 / self.den as f64,
            self.num[1] as f64 / self.den as f64,
        ])
    }

    /// Exact image under an integer matrix.
    pub fn mapped(&self, m: [[i64; 2]; 2]) -> RationalPoint {
        let q = self.den;
        let (i, j) = (self.num[0], self.num[1]);
        RationalPoint {
            num: [
                (m[0][0] * i + m[0][1] * j).rem_euclid(q),
                (m[1][0] * i + m[1][1] * j).rem_euclid(q),
            ],
            den: q,
        }
    }

    /// Minimal period under the matrix (exact integer iteration mod `den`).
    pub fn period(&self, m: [[i64; 2]; 2]) -> usize {
        let mut p = self.mapped(m);
        let mut k = 1;
        while p != *self {
            p = p.mapped(m);
            k += 1;
        }
        k
    }
}

/// Rational points with denominator `≤ max_den` within `radius` of `target`,
/// closest first (ties: smaller denominator).
pub fn rational_points_near(target: &TorusPoint, max_den: i64, radius: f64) -> Vec<(RationalPoint, f64)> {
    let mut seen = std::collections::HashSet::new();
    let mut out = Vec::new();
    for q in 1..=max_den {
        let lo_i = ((target.u - radius) * q as f64).floor() as i64;
        let hi_i = ((target.u + radius) * q as f64).ceil() as i64;
        let lo_j = ((target.v - radius) * q as f64).floor() as i64;
        let hi_j = ((target.v + radius) * q as f64).ceil() as i64;
        for i in lo_i..=hi_i {
            for j in lo_j..=hi_j {
                let r = RationalPoint::new(i, j, q);
                if !seen.insert(r) {
                    continue;
                }
                let d = torus_dist(&r.to_point(), target);
                if d <= radius {
                    out.push((r, d));
                }
            }
        }
    }
    out.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.den.cmp(&b.0.den)));
    out
}

/// Closest rational (hence periodic) point to `target`, with its exact period.
pub fn find_periodic_near(
    a: &LinearAnosov,
    target: &TorusPoint,
    max_den: i64,
    radius: f64,
) -> Result<(RationalPoint, usize)> {
    if max_den < 1 || !(radius > 0.0) {
        return Err(Error::InvalidInput(format!(
            "need max_den >= 1 and radius > 0, got {max_den}, {radius}"
        )));
    }
    let (r, _) = rational_points_near(target, max_den, radius)
        .into_iter()
        .next()
        .ok_or_else(|| {
            Error::NotFound(format!(
                "no rational point with denominator <= {max_den} within {radius} of ({}, {})",
                target.u, target.v
            ))
        })?;
    Ok((r, r.period(a.matrix)))
}

/// The points and neighbourhoods of a 4-legged heteroclinic su-loop through `x`.
///
/// For `i = 1, 2`: `w_i ∈ W^s(x) ∩ W^u(p_i)` and `z_i ∈ W^u(x) ∩ W^s(p_i)`,
/// so `x →u z_i →s p_i →u w_i →s x` closes up.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeteroclinicQuad {
    pub x: TorusPoint,
    pub p: [TorusPoint; 2],
    pub periods: [usize; 2],
    pub p_rational: [RationalPoint; 2],
    pub w: [TorusPoint; 2],
    pub z: [TorusPoint; 2],
    pub u_radius: [f64; 2],
    /// Half-lengths of `W^s(x)` and `W^u(x)` containing both `w_i` resp. `z_i`.
    pub eps0: [f64; 2],
    /// Half-lengths of `W^u(p_i)` containing `w_i`.
    pub eps_u: [f64; 2],
    /// Half-lengths of `W^s(p_i)` containing `z_i`.
    pub eps_s: [f64; 2],
    pub n_check: usize,
}

/// One leg of an su-path: endpoints on a common local leaf of `kind`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Leg {
    pub kind: LeafKind,
    pub from: TorusPoint,
    pub to: TorusPoint,
}

impl HeteroclinicQuad {
    /// The loop `x →u z_i →s p_i →u w_i →s x` (`i` is 0 or 1).
    pub fn loop_legs(&self, i: usize) -> [Leg; 4] {
        [
            Leg {
                kind: LeafKind::Unstable,
                from: self.x,
                to: self.z[i],
            },
            Leg {
                kind: LeafKind::Stable,
                from: self.z[i],
                to: self.p[i],
            },
            Leg {
                kind: LeafKind::Unstable,
                from: self.p[i],
                to: self.w[i],
            },
            Leg {
                kind: LeafKind::Stable,
                from: self.w[i],
                to: self.x,
            },
        ]
    }

    /// Residual of every leaf membership of both loops (max over legs).
    pub fn max_leg_residual(&self, a: &LinearAnosov) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..2 {
            for leg in self.loop_legs(i) {
                worst = worst.max(a.leaf_coordinate(&leg.from, &leg.to, leg.kind).1);
            }
        }
        worst
    }

    /// Clearance of the ball centres `w_i` from every forbidden set; the
    /// invariant is `u_radius[i] < clearance[i]`.
    pub fn clearances(&self, a: &LinearAnosov) -> [f64; 2] {
        let segs = SeparationSets::new(a, self);
        [segs.clearance(&self.w[0], self), segs.clearance(&self.w[1], self)]
    }

    /// Checks every type invariant, returning a diagnostic on failure.
    pub fn validate(&self, a: &LinearAnosov) -> Result<()> {
        let res = self.max_leg_residual(a);
        if res >= LEAF_TOL {
            return Err(Error::ConstructionFailed(format!(
                "leg residual {res:e} exceeds {LEAF_TOL:e}"
            )));
        }
        if self.p[0].approx_eq(&self.p[1]) {
            return Err(Error::ConstructionFailed("p1 = p2".into()));
        }
        let gap = torus_dist(&self.w[0], &self.w[1]);
        if self.u_radius[0] + self.u_radius[1] >= gap {
            return Err(Error::ConstructionFailed(format!(
                "balls around w1, w2 intersect (radii {:?}, gap {gap})",
                self.u_radius
            )));
        }
        let c = self.clearances(a);
        for i in 0..2 {
            if !(self.u_radius[i] > 0.0 && self.u_radius[i] < c[i]) {
                return Err(Error::ConstructionFailed(format!(
                    "ball {} radius {} violates clearance {}",
                    i + 1,
                    self.u_radius[i],
                    c[i]
                )));
            }
        }
        Ok(())
    }
}

/// The leaf segments whose orbits the neighbourhoods `U_i` must avoid.
struct SeparationSets {
    segments: Vec<LeafSegment>,
}

impl SeparationSets {
    fn new(a: &LinearAnosov, q: &HeteroclinicQuad) -> SeparationSets {
        let mut segments = Vec::new();
        let mk = |base, kind, half_length| LeafSegment {
            base,
            kind,
            half_length,
            direction: a.direction(kind),
        };
        // f^n(W^s_{ε0}(x)), n ≥ 1
        let mut s = mk(q.x, LeafKind::Stable, q.eps0[0]);
        for _ in 0..q.n_check {
            s = s.mapped(a, false);
            segments.push(s);
        }
        // f^{-n}(W^u_{ε0}(x)), n ≥ 0
        let mut s = mk(q.x, LeafKind::Unstable, q.eps0[1]);
        segments.push(s);
        for _ in 0..q.n_check {
            s = s.mapped(a, true);
            segments.push(s);
        }
        for j in 0..2 {
            // f^{-n}(W^u_{ε_j}(p_j)), n ≥ 1
            let mut s = mk(q.p[j], LeafKind::Unstable, q.eps_u[j]);
            for _ in 0..q.n_check {
                s = s.mapped(a, true);
                segments.push(s);
            }
            // f^n(W^s_{ε_j}(p_j)), n ≥ 0
            let mut s = mk(q.p[j], LeafKind::Stable, q.eps_s[j]);
            segments.push(s);
            for _ in 0..q.n_check {
                s = s.mapped(a, false);
                segments.push(s);
            }
        }
        SeparationSets { segments }
    }

    fn clearance(&self, w: &TorusPoint, q: &HeteroclinicQuad) -> f64 {
        let mut c = f64::INFINITY;
        for s in &self.segments {
            c = c.min(s.distance_to(w));
        }
        for p in [q.x, q.p[0], q.p[1], q.z[0], q.z[1]] {
            c = c.min(torus_dist(w, &p));
        }
        c
    }
}

struct Candidate {
    r: RationalPoint,
    p: TorusPoint,
    period: usize,
    w: TorusPoint,
    z: TorusPoint,
    s_w: f64,
    u_z: f64,
    u_w: f64,
    s_z: f64,
}

/// Searches rational periodic points near `x` for a pair `p_1, p_2` whose
/// quadrilateral admits separated neighbourhoods, maximising the smaller radius.
pub fn build_quad(
    a: &LinearAnosov,
    x: TorusPoint,
    search_radius: f64,
    max_den: i64,
    n_check: usize,
) -> Result<HeteroclinicQuad> {
    Ok(build_quads(a, x, search_radius, max_den, n_check, 1)?.remove(0))
}

/// Up to `count` quads at `x` with pairwise distinct periodic points, best first.
pub fn build_quads(
    a: &LinearAnosov,
    x: TorusPoint,
    search_radius: f64,
    max_den: i64,
    n_check: usize,
    count: usize,
) -> Result<Vec<HeteroclinicQuad>> {
    if !(search_radius > 0.0) {
        return Err(Error::ConstructionFailed(format!(
            "search radius must be positive, got {search_radius}"
        )));
    }
    if search_radius >= 0.25 {
        return Err(Error::ConstructionFailed(format!(
            "search radius {search_radius} leaves the local product chart (< 0.25)"
        )));
    }
    let mut cands = Vec::new();
    for (r, _) in rational_points_near(&x, max_den, search_radius) {
        let p = r.to_point();
        if torus_dist(&p, &x) < 1e-9 {
            continue;
        }
        let w = bracket(a, &x, &p)?;
        let z = bracket(a, &p, &x)?;
        let (s_w, _) = a.leaf_coordinate(&x, &w, LeafKind::Stable);
        let (u_z, _) = a.leaf_coordinate(&x, &z, LeafKind::Unstable);
        let (u_w, _) = a.leaf_coordinate(&p, &w, LeafKind::Unstable);
        let (s_z, _) = a.leaf_coordinate(&p, &z, LeafKind::Stable);
        cands.push(Candidate {
            r,
            p,
            period: r.period(a.matrix),
            w,
            z,
            s_w,
            u_z,
            u_w,
            s_z,
        });
        if cands.len() >= 40 {
            break;
        }
    }
    if cands.len() < 2 {
        return Err(Error::ConstructionFailed(format!(
            "found {} periodic candidates with denominator <= {max_den} within {search_radius}",
            cands.len()
        )));
    }
    let grow = 1.0 + 1e-9;
    let mut scored: Vec<(f64, HeteroclinicQuad)> = Vec::new();
    for i in 0..cands.len() {
        for j in (i + 1)..cands.len() {
            let (c1, c2) = (&cands[i], &cands[j]);
            let mut q = HeteroclinicQuad {
                x,
                p: [c1.p, c2.p],
                periods: [c1.period, c2.period],
                p_rational: [c1.r, c2.r],
                w: [c1.w, c2.w],
                z: [c1.z, c2.z],
                u_radius: [0.0, 0.0],
                eps0: [
                    c1.s_w.abs().max(c2.s_w.abs()) * grow,
                    c1.u_z.abs().max(c2.u_z.abs()) * grow,
                ],
                eps_u: [c1.u_w.abs() * grow, c2.u_w.abs() * grow],
                eps_s: [c1.s_z.abs() * grow, c2.s_z.abs() * grow],
                n_check,
            };
            let gap = torus_dist(&q.w[0], &q.w[1]);
            let cl = q.clearances(a);
            let r0 = 0.45 * cl[0].min(gap);
            let r1 = 0.45 * cl[1].min(gap);
            if r0 < 1e-6 || r1 < 1e-6 {
                continue;
            }
            q.u_radius = [r0, r1];
            scored.push((r0.min(r1), q));
        }
    }
    if scored.is_empty() {
        return Err(Error::ConstructionFailed(format!(
            "no candidate pair among {} periodic points satisfies the separation conditions \
             for n <= {n_check}",
            cands.len()
        )));
    }
    // stable sort keeps the enumeration order among equal scores
    scored.sort_by(|l, r| r.0.total_cmp(&l.0));
    let mut out: Vec<HeteroclinicQuad> = Vec::new();
    for (_, q) in scored {
        let used = out.iter().any(|o| o.p_rational.iter().any(|r| q.p_rational.contains(r)));
        if used {
            continue;
        }
        q.validate(a)?;
        out.push(q);
        if out.len() == count {
            break;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cat_map_eigen_data() {
        let a = cat_map();
        let s5 = 5f64.sqrt();
        assert!((a.lambda_u - (3.0 + s5) / 2.0).abs() < 1e-14);
        assert!((a.lambda_s - (3.0 - s5) / 2.0).abs() < 1e-14);
        assert!((a.lambda_u - 2.6180339887).abs() < 1e-10);
        assert!((a.lambda_s - 0.3819660113).abs() < 1e-10);
        assert!((a.lambda_u * a.lambda_s - a.det() as f64).abs() < 1e-14);
        for (e, l) in [(a.e_u, a.lambda_u), (a.e_s, a.lambda_s)] {
            let ae = a.apply_lift(e);
            assert!(norm([ae[0] - l * e[0], ae[1] - l * e[1]]) < 1e-12);
        }
    }

    #[test]
    fn negative_trace_and_negative_det() {
        for m in [[[-2, 1], [1, -1]], [[3, 1], [1, 0]], [[0, 1], [1, 3]]] {
            let a = make_anosov(m).unwrap();
            assert!(a.expansion() > 1.0 && a.contraction() < 1.0);
            assert!((a.lambda_u * a.lambda_s - a.det() as f64).abs() < 1e-12);
            for (e, l) in [(a.e_u, a.lambda_u), (a.e_s, a.lambda_s)] {
                let ae = a.apply_lift(e);
                assert!(norm([ae[0] - l * e[0], ae[1] - l * e[1]]) < 1e-12);
            }
        }
    }

    #[test]
    fn rejects_non_hyperbolic() {
        assert!(matches!(make_anosov([[1, 1], [1, 0]]), Err(Error::NotAnosov(_))));
        assert!(matches!(make_anosov([[2, 0], [0, 1]]), Err(Error::NotAnosov(_))));
        assert!(matches!(make_anosov([[1, 1], [0, 1]]), Err(Error::NotAnosov(_))));
    }

    #[test]
    fn powers_square_the_eigenvalues() {
        let a = cat_map();
        let a3 = a.power(3).unwrap();
        assert!((a3.lambda_u - a.lambda_u.powi(3)).abs() < 1e-10);
        assert_eq!(a3.matrix, [[13, 8], [8, 5]]);
    }

    #[test]
    fn leaf_through_origin_and_invariance() {
        let a = cat_map();
        let l = leaf(&a, TorusPoint::ORIGIN, LeafKind::Stable, 0.2).unwrap();
        assert_eq!(l.direction, a.e_s);
        let x = TorusPoint { u: 0.3, v: 0.7 };
        let seg = leaf(&a, x, LeafKind::Stable, 0.1).unwrap();
        let img = seg.mapped(&a, false);
        for k in 0..=10 {
            let t = -0.1 + 0.02 * k as f64;
            let fp = a.apply(&seg.point_at(t));
            assert!(img.distance_to(&fp) < 1e-12);
        }
        assert!((img.half_length - a.contraction() * 0.1).abs() < 1e-15);
        assert!(leaf(&a, x, LeafKind::Stable, 0.6).is_err());
    }

    #[test]
    fn stable_points_contract_at_lambda_s() {
        let a = cat_map();
        let x = TorusPoint { u: 0.3, v: 0.7 };
        let y = leaf(&a, x, LeafKind::Stable, 0.1).unwrap().point_at(0.05);
        let (mut px, mut py) = (x, y);
        let mut prev = torus_dist(&px, &py);
        for _ in 0..8 {
            px = a.apply(&px);
            py = a.apply(&py);
            let d = torus_dist(&px, &py);
            assert!((d / prev - a.lambda_s).abs() < 1e-6);
            prev = d;
        }
    }

    #[test]
    fn bracket_examples() {
        let a = cat_map();
        let x = TorusPoint { u: 0.2, v: 0.4 };
        assert!(bracket(&a, &x, &x).unwrap().approx_eq(&x));
        let y = TorusPoint { u: 0.1, v: 0.0 };
        let q = bracket(&a, &TorusPoint::ORIGIN, &y).unwrap();
        // oracle: solve s e_s - u e_u = (0.1, 0) by explicit inverse
        let (es, eu) = (a.e_s, a.e_u);
        let det = es[0] * (-eu[1]) - (-eu[0]) * es[1];
        let s = (0.1 * (-eu[1])) / det;
        let expect = TorusPoint::from_lift([s * es[0], s * es[1]]);
        assert!(torus_dist(&q, &expect) < 1e-14);
        assert!(a.leaf_coordinate(&TorusPoint::ORIGIN, &q, LeafKind::Stable).1 < 1e-12);
        assert!(a.leaf_coordinate(&y, &q, LeafKind::Unstable).1 < 1e-12);
        let far = TorusPoint { u: 0.4, v: 0.3 };
        assert!(matches!(
            bracket(&a, &TorusPoint::ORIGIN, &far),
            Err(Error::AmbiguousBranch(_))
        ));
    }

    #[test]
    fn bracket_is_not_symmetric() {
        let a = cat_map();
        let x = TorusPoint { u: 0.52, v: 0.31 };
        let y = TorusPoint { u: 0.58, v: 0.26 };
        let xy = bracket(&a, &x, &y).unwrap();
        let yx = bracket(&a, &y, &x).unwrap();
        assert!(torus_dist(&xy, &yx) > 1e-3);
    }

    #[test]
    fn periodic_examples() {
        let a = cat_map();
        let (r, k) = find_periodic_near(&a, &TorusPoint::ORIGIN, 1, 0.1).unwrap();
        assert_eq!((r, k), (RationalPoint::new(0, 0, 1), 1));
        let (r, k) = find_periodic_near(&a, &TorusPoint { u: 0.5, v: 0.5 }, 2, 0.1).unwrap();
        assert_eq!((r.num, r.den, k), ([1, 1], 2, 3));
        let (r, k) = find_periodic_near(&a, &TorusPoint { u: 0.33, v: 0.33 }, 3, 0.05).unwrap();
        assert_eq!((r.num, r.den), ([1, 1], 3));
        // (1/3,1/3) -> (0,2/3) -> (2/3,2/3) -> (0,1/3) -> (1/3,1/3)
        assert_eq!(k, 4);
        assert!(matches!(
            find_periodic_near(&a, &TorusPoint { u: 0.33, v: 0.33 }, 2, 0.01),
            Err(Error::NotFound(_))
        ));
    }

    #[test]
    fn periodic_points_return_exactly() {
        let a = cat_map();
        for q in 1..=12 {
            for i in 0..q {
                let r = RationalPoint::new(i, (3 * i + 1) % q, q);
                let k = r.period(a.matrix);
                let mut p = r;
                for _ in 0..k {
                    p = p.mapped(a.matrix);
                }
                assert_eq!(p, r);
            }
        }
    }

    #[test]
    fn quad_at_origin() {
        let a = cat_map();
        let q = build_quad(&a, TorusPoint::ORIGIN, 0.1, 10, 50).unwrap();
        q.validate(&a).unwrap();
        assert!(!q.p[0].approx_eq(&q.p[1]));
        for i in 0..2 {
            let legs = q.loop_legs(i);
            let kinds: Vec<_> = legs.iter().map(|l| l.kind).collect();
            assert_eq!(
                kinds,
                vec![LeafKind::Unstable, LeafKind::Stable, LeafKind::Unstable, LeafKind::Stable]
            );
            for w in legs.windows(2) {
                assert!(w[0].to.approx_eq(&w[1].from));
            }
            assert!(legs[3].to.approx_eq(&legs[0].from));
            assert!(torus_dist(&q.p[i], &q.x) <= 0.1);
            assert!(q.p_rational[i].den <= 10);
        }
        assert!(q.max_leg_residual(&a) < 1e-10);
    }

    #[test]
    fn quad_degenerate_radius_fails() {
        let a = cat_map();
        assert!(matches!(
            build_quad(&a, TorusPoint::ORIGIN, 0.0, 10, 50),
            Err(Error::ConstructionFailed(_))
        ));
        assert!(build_quad(&a, TorusPoint::ORIGIN, 0.01, 2, 50).is_err());
    }

    #[test]
    fn several_quads_use_distinct_periodic_points() {
        let a = cat_map();
        let qs = build_quads(&a, TorusPoint::ORIGIN, 0.1, 10, 50, 3).unwrap();
        assert!(qs.len() >= 2);
        assert_eq!(qs[0].p, build_quad(&a, TorusPoint::ORIGIN, 0.1, 10, 50).unwrap().p);
        for (k, q) in qs.iter().enumerate() {
            assert!(q.max_leg_residual(&a) < 1e-10);
            for r in &qs[..k] {
                for p in &q.p_rational {
                    assert!(!r.p_rational.contains(p));
                }
            }
        }
    }
}
