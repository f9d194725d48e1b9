//! Independent oracles shared by the integration suites.
#![allow(dead_code)]

use num_traits::{Signed, Zero};
use skewlab::monotone::{PiecewiseAffine, Q};
use skewlab::torus::TorusPoint;

/// Value of `f` at `x` read straight off the raw breakpoint data.
fn raw_eval(f: &PiecewiseAffine, x: &Q) -> Option<Q> {
    let nodes = f.nodes();
    if x < &nodes[0] || x > nodes.last().unwrap() {
        return None;
    }
    for (k, n) in nodes.iter().enumerate() {
        if n == x {
            return Some(f.node_values()[k].clone());
        }
    }
    let k = nodes.iter().rposition(|n| n < x).unwrap();
    let (l, r) = f.piece_limits(k);
    let w = &nodes[k + 1] - &nodes[k];
    Some(l + (r - l) * (x - &nodes[k]) / w)
}

/// Cells of a function: its nodes and the open pieces between them.
#[derive(Clone)]
enum RawCell {
    Point(Q),
    Open(Q, Q),
}

fn cells(breaks: &[Q]) -> Vec<RawCell> {
    let mut out = Vec::new();
    for (k, b) in breaks.iter().enumerate() {
        out.push(RawCell::Point(b.clone()));
        if k + 1 < breaks.len() {
            out.push(RawCell::Open(b.clone(), breaks[k + 1].clone()));
        }
    }
    out
}

/// `(slope, intercept)` of `f` on an open cell contained in one of its pieces.
fn affine_on(f: &PiecewiseAffine, lo: &Q, hi: &Q) -> (Q, Q) {
    let mid = (lo + hi) / Q::from_integer(2.into());
    let k = f.nodes().iter().rposition(|n| n < &mid).unwrap();
    let (l, r) = f.piece_limits(k);
    let (x0, x1) = (&f.nodes()[k], &f.nodes()[k + 1]);
    let slope = (r - l) / (x1 - x0);
    let intercept = l - &slope * x0;
    (slope, intercept)
}

fn solves_l1(l1: &PiecewiseAffine, y: &Q, s: &Q) -> bool {
    match raw_eval(l1, y) {
        Some(v) => v + s == *y,
        None => false,
    }
}

/// True when some `x` has `l2(x) + t = x` and `y = phi(x)` satisfies
/// `l1(y) + s = y`, found by enumerating every combination of cells of
/// `(l2, phi)` and of `l1`.
pub fn pbb_conflict(l1: &PiecewiseAffine, l2: &PiecewiseAffine, phi: &PiecewiseAffine, s: &Q, t: &Q) -> bool {
    let mut breaks: Vec<Q> = l2.nodes().iter().chain(phi.nodes()).cloned().collect();
    breaks.sort();
    breaks.dedup();
    let l1_cells = cells(l1.nodes());
    for c in cells(&breaks) {
        match c {
            RawCell::Point(x) => {
                if raw_eval(l2, &x).unwrap() + t == x {
                    let y = raw_eval(phi, &x).unwrap();
                    if solves_l1(l1, &y, s) {
                        return true;
                    }
                }
            }
            RawCell::Open(c0, c1) => {
                let (a2, b2) = affine_on(l2, &c0, &c1);
                let (af, bf) = affine_on(phi, &c0, &c1);
                let p = &a2 - Q::from_integer(1.into());
                let r = &b2 + t;
                if !p.is_zero() {
                    let x = -r / p;
                    if x > c0 && x < c1 {
                        let y = &af * &x + &bf;
                        if solves_l1(l1, &y, s) {
                            return true;
                        }
                    }
                    continue;
                }
                if !r.is_zero() {
                    continue;
                }
                // every x of the cell is fixed by l2 + t
                if af.is_zero() {
                    if solves_l1(l1, &bf, s) {
                        return true;
                    }
                    continue;
                }
                let (j0, j1) = (&af * &c0 + &bf, &af * &c1 + &bf);
                for d in &l1_cells {
                    match d {
                        RawCell::Point(y) => {
                            if y > &j0 && y < &j1 && solves_l1(l1, y, s) {
                                return true;
                            }
                        }
                        RawCell::Open(d0, d1) => {
                            let k0 = if d0 > &j0 { d0.clone() } else { j0.clone() };
                            let k1 = if d1 < &j1 { d1.clone() } else { j1.clone() };
                            if k0 >= k1 {
                                continue;
                            }
                            let (a1, b1) = affine_on(l1, d0, d1);
                            let qq = &a1 - Q::from_integer(1.into());
                            let rr = &b1 + s;
                            if qq.is_zero() {
                                if rr.is_zero() {
                                    return true;
                                }
                            } else {
                                let y = -rr / qq;
                                if y > k0 && y < k1 {
                                    return true;
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    false
}

/// Partition sum of `|f(t_{i+1}) − f(t_i)|` over the nodes inside `[a, b]`,
/// refined by points at distance `eta` on both sides of each node.
pub fn partition_variation(f: &PiecewiseAffine, a: &Q, b: &Q, eta: &Q) -> Q {
    let mut pts = vec![a.clone(), b.clone()];
    for n in f.nodes() {
        for cand in [n - eta, n.clone(), n + eta] {
            if &cand >= a && &cand <= b {
                pts.push(cand);
            }
        }
    }
    pts.sort();
    pts.dedup();
    let mut sum = Q::zero();
    for w in pts.windows(2) {
        sum += (raw_eval(f, &w[1]).unwrap() - raw_eval(f, &w[0]).unwrap()).abs();
    }
    sum
}

/// Area of the convex hull of points given in lifted coordinates.
pub fn convex_hull_area(points: &[TorusPoint]) -> f64 {
    let mut p: Vec<[f64; 2]> = points.iter().map(|q| [q.u, q.v]).collect();
    p.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    p.dedup();
    if p.len() < 3 {
        return 0.0;
    }
    let cross = |o: [f64; 2], a: [f64; 2], b: [f64; 2]| (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]);
    let mut hull: Vec<[f64; 2]> = Vec::new();
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &[f64; 2]>> = if pass == 0 { Box::new(p.iter()) } else { Box::new(p.iter().rev()) };
        for &q in iter {
            while hull.len() >= start + 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], q) <= 0.0 {
                hull.pop();
            }
            hull.push(q);
        }
        hull.pop();
    }
    let n = hull.len();
    (0..n)
        .map(|i| {
            let (a, b) = (hull[i], hull[(i + 1) % n]);
            a[0] * b[1] - a[1] * b[0]
        })
        .sum::<f64>()
        .abs()
        / 2.0
}

/// Central finite-difference Jacobian of a planar map in lifted coordinates.
pub fn fd_jacobian(f: impl Fn([f64; 2]) -> [f64; 2], p: [f64; 2], h: f64) -> [[f64; 2]; 2] {
    let mut j = [[0.0; 2]; 2];
    for c in 0..2 {
        let (mut a, mut b) = (p, p);
        a[c] += h;
        b[c] -= h;
        let (fa, fb) = (f(a), f(b));
        for r in 0..2 {
            j[r][c] = (fa[r] - fb[r]) / (2.0 * h);
        }
    }
    j
}
