//! Exact rational analysis of piecewise-affine monotone maps of an interval:
//! total variation, jumps, fixed-point sets of translated maps and the search
//! for translation pairs whose fixed-point sets avoid each other.

use std::cmp::Ordering;
use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use rand::Rng;

use crate::error::{Error, Result};

pub type Q = BigRational;

/// `n/d` as an exact rational.
pub fn q(n: i64, d: i64) -> Q {
    Q::new(BigInt::from(n), BigInt::from(d))
}

pub fn to_f64(x: &Q) -> f64 {
    use num_traits::ToPrimitive;
    x.to_f64().unwrap_or(f64::NAN)
}

/// A connected subset of ℝ with explicit endpoint closure; `lo == hi` only for a point.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Interval {
    pub lo: Q,
    pub hi: Q,
    pub lo_closed: bool,
    pub hi_closed: bool,
}

impl Interval {
    pub fn closed(lo: Q, hi: Q) -> Interval {
        Interval { lo, hi, lo_closed: true, hi_closed: true }
    }

    pub fn open(lo: Q, hi: Q) -> Interval {
        Interval { lo, hi, lo_closed: false, hi_closed: false }
    }

    pub fn point(x: Q) -> Interval {
        Interval::closed(x.clone(), x)
    }

    pub fn is_empty(&self) -> bool {
        match self.lo.cmp(&self.hi) {
            Ordering::Less => false,
            Ordering::Equal => !(self.lo_closed && self.hi_closed),
            Ordering::Greater => true,
        }
    }

    pub fn is_point(&self) -> bool {
        !self.is_empty() && self.lo == self.hi
    }

    pub fn contains(&self, x: &Q) -> bool {
        let above = if self.lo_closed { *x >= self.lo } else { *x > self.lo };
        let below = if self.hi_closed { *x <= self.hi } else { *x < self.hi };
        above && below
    }

    pub fn intersect(&self, other: &Interval) -> Interval {
        let (lo, lo_closed) = match self.lo.cmp(&other.lo) {
            Ordering::Greater => (self.lo.clone(), self.lo_closed),
            Ordering::Less => (other.lo.clone(), other.lo_closed),
            Ordering::Equal => (self.lo.clone(), self.lo_closed && other.lo_closed),
        };
        let (hi, hi_closed) = match self.hi.cmp(&other.hi) {
            Ordering::Less => (self.hi.clone(), self.hi_closed),
            Ordering::Greater => (other.hi.clone(), other.hi_closed),
            Ordering::Equal => (self.hi.clone(), self.hi_closed && other.hi_closed),
        };
        Interval { lo, hi, lo_closed, hi_closed }
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_point() {
            return write!(f, "{{{}}}", self.lo);
        }
        write!(
            f,
            "{}{}, {}{}",
            if self.lo_closed { '[' } else { '(' },
            self.lo,
            self.hi,
            if self.hi_closed { ']' } else { ')' }
        )
    }
}

/// Finite union of pairwise disjoint, non-adjacent intervals in ascending order.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct IntervalSet {
    parts: Vec<Interval>,
}

impl IntervalSet {
    pub fn empty() -> IntervalSet {
        IntervalSet { parts: Vec::new() }
    }

    pub fn from_intervals(mut parts: Vec<Interval>) -> IntervalSet {
        parts.retain(|i| !i.is_empty());
        parts.sort_by(|a, b| a.lo.cmp(&b.lo).then(b.lo_closed.cmp(&a.lo_closed)));
        let mut out: Vec<Interval> = Vec::with_capacity(parts.len());
        for p in parts {
            if let Some(cur) = out.last_mut() {
                let joins = p.lo < cur.hi || (p.lo == cur.hi && (cur.hi_closed || p.lo_closed));
                if joins {
                    match p.hi.cmp(&cur.hi) {
                        Ordering::Greater => {
                            cur.hi = p.hi;
                            cur.hi_closed = p.hi_closed;
                        }
                        Ordering::Equal => cur.hi_closed |= p.hi_closed,
                        Ordering::Less => {}
                    }
                    continue;
                }
            }
            out.push(p);
        }
        IntervalSet { parts: out }
    }

    pub fn point(x: Q) -> IntervalSet {
        IntervalSet { parts: vec![Interval::point(x)] }
    }

    pub fn parts(&self) -> &[Interval] {
        &self.parts
    }

    pub fn is_empty(&self) -> bool {
        self.parts.is_empty()
    }

    /// True when the set is a finite set of points.
    pub fn is_discrete(&self) -> bool {
        self.parts.iter().all(Interval::is_point)
    }

    pub fn contains(&self, x: &Q) -> bool {
        self.parts.iter().any(|p| p.contains(x))
    }

    pub fn union(&self, other: &IntervalSet) -> IntervalSet {
        IntervalSet::from_intervals(self.parts.iter().chain(&other.parts).cloned().collect())
    }

    pub fn intersect(&self, other: &IntervalSet) -> IntervalSet {
        let mut out = Vec::new();
        for a in &self.parts {
            for b in &other.parts {
                let c = a.intersect(b);
                if !c.is_empty() {
                    out.push(c);
                }
            }
        }
        IntervalSet::from_intervals(out)
    }

    pub fn closure(&self) -> IntervalSet {
        IntervalSet::from_intervals(
            self.parts
                .iter()
                .map(|p| Interval::closed(p.lo.clone(), p.hi.clone()))
                .collect(),
        )
    }

    /// `[c, d] ⊆ self`.
    pub fn covers(&self, c: &Q, d: &Q) -> bool {
        let target = Interval::closed(c.clone(), d.clone());
        if target.is_empty() {
            return true;
        }
        // components are maximal, so a connected target sits inside one of them
        self.parts.iter().any(|p| p.contains(c) && p.contains(d))
    }

    pub fn inf(&self) -> Option<&Q> {
        self.parts.first().map(|p| &p.lo)
    }

    pub fn sup(&self) -> Option<&Q> {
        self.parts.last().map(|p| &p.hi)
    }
}

impl fmt::Display for IntervalSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.parts.is_empty() {
            return write!(f, "∅");
        }
        let s: Vec<String> = self.parts.iter().map(|p| p.to_string()).collect();
        write!(f, "{}", s.join(" ∪ "))
    }
}

/// Position of a point relative to the breakpoints.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cell {
    Node(usize),
    /// Open piece `(x_k, x_{k+1})`.
    Piece(usize),
}

/// A function on `[x_0, x_m]`, affine on each open piece, with arbitrary values
/// at the breakpoints.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PiecewiseAffine {
    nodes: Vec<Q>,
    node_values: Vec<Q>,
    /// `f(x_k^+)` for piece `k`.
    left: Vec<Q>,
    /// `f(x_{k+1}^-)` for piece `k`.
    right: Vec<Q>,
}

impl PiecewiseAffine {
    pub fn new(nodes: Vec<Q>, node_values: Vec<Q>, left: Vec<Q>, right: Vec<Q>) -> Result<PiecewiseAffine> {
        let m = nodes.len();
        if m < 2 || node_values.len() != m || left.len() != m - 1 || right.len() != m - 1 {
            return Err(Error::InvalidInput(format!(
                "need m ≥ 2 nodes with m values and m − 1 pieces (got {m}, {}, {}, {})",
                node_values.len(),
                left.len(),
                right.len()
            )));
        }
        if nodes.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidInput("nodes must be strictly ascending".into()));
        }
        Ok(PiecewiseAffine { nodes, node_values, left, right })
    }

    /// Continuous interpolation of `(nodes[k], values[k])`.
    pub fn interpolate(nodes: Vec<Q>, values: Vec<Q>) -> Result<PiecewiseAffine> {
        if values.is_empty() {
            return Err(Error::InvalidInput("no values".into()));
        }
        let left = values[..values.len() - 1].to_vec();
        let right = values[1..].to_vec();
        PiecewiseAffine::new(nodes, values, left, right)
    }

    pub fn affine(lo: Q, hi: Q, slope: Q, offset: Q) -> Result<PiecewiseAffine> {
        let f = |x: &Q| &slope * x + &offset;
        let (a, b) = (f(&lo), f(&hi));
        PiecewiseAffine::interpolate(vec![lo, hi], vec![a, b])
    }

    pub fn nodes(&self) -> &[Q] {
        &self.nodes
    }

    pub fn node_values(&self) -> &[Q] {
        &self.node_values
    }

    pub fn piece_limits(&self, k: usize) -> (&Q, &Q) {
        (&self.left[k], &self.right[k])
    }

    pub fn pieces(&self) -> usize {
        self.left.len()
    }

    pub fn domain(&self) -> (&Q, &Q) {
        (&self.nodes[0], self.nodes.last().unwrap())
    }

    pub fn slope(&self, k: usize) -> Q {
        (&self.right[k] - &self.left[k]) / (&self.nodes[k + 1] - &self.nodes[k])
    }

    /// Affine extension of piece `k` evaluated at `x`.
    pub fn piece_value(&self, k: usize, x: &Q) -> Q {
        &self.left[k] + self.slope(k) * (x - &self.nodes[k])
    }

    pub fn locate(&self, x: &Q) -> Result<Cell> {
        let (lo, hi) = self.domain();
        if x < lo || x > hi {
            return Err(Error::OutsideDomain(format!("{x} not in [{lo}, {hi}]")));
        }
        Ok(match self.nodes.binary_search(x) {
            Ok(k) => Cell::Node(k),
            Err(k) => Cell::Piece(k - 1),
        })
    }

    pub fn eval(&self, x: &Q) -> Result<Q> {
        Ok(match self.locate(x)? {
            Cell::Node(k) => self.node_values[k].clone(),
            Cell::Piece(k) => self.piece_value(k, x),
        })
    }

    /// `f(x^-)`; equals `f(x_0)` at the left end.
    pub fn left_limit(&self, x: &Q) -> Result<Q> {
        Ok(match self.locate(x)? {
            Cell::Node(0) => self.node_values[0].clone(),
            Cell::Node(k) => self.right[k - 1].clone(),
            Cell::Piece(k) => self.piece_value(k, x),
        })
    }

    /// `f(x^+)`; equals `f(x_m)` at the right end.
    pub fn right_limit(&self, x: &Q) -> Result<Q> {
        Ok(match self.locate(x)? {
            Cell::Node(k) if k + 1 == self.nodes.len() => self.node_values[k].clone(),
            Cell::Node(k) => self.left[k].clone(),
            Cell::Piece(k) => self.piece_value(k, x),
        })
    }

    fn same_domain(&self, other: &PiecewiseAffine) -> Result<()> {
        if self.domain() != other.domain() {
            let (a, b) = self.domain();
            let (c, d) = other.domain();
            return Err(Error::InvalidInput(format!("domains [{a}, {b}] and [{c}, {d}] differ")));
        }
        Ok(())
    }

    fn combine(&self, other: &PiecewiseAffine, op: impl Fn(&Q, &Q) -> Q) -> Result<PiecewiseAffine> {
        self.same_domain(other)?;
        let mut nodes: Vec<Q> = self.nodes.iter().chain(&other.nodes).cloned().collect();
        nodes.sort();
        nodes.dedup();
        let mut node_values = Vec::with_capacity(nodes.len());
        for x in &nodes {
            node_values.push(op(&self.eval(x)?, &other.eval(x)?));
        }
        let mut left = Vec::with_capacity(nodes.len() - 1);
        let mut right = Vec::with_capacity(nodes.len() - 1);
        for w in nodes.windows(2) {
            left.push(op(&self.right_limit(&w[0])?, &other.right_limit(&w[0])?));
            right.push(op(&self.left_limit(&w[1])?, &other.left_limit(&w[1])?));
        }
        PiecewiseAffine::new(nodes, node_values, left, right)
    }

    pub fn sub(&self, other: &PiecewiseAffine) -> Result<PiecewiseAffine> {
        self.combine(other, |a, b| a - b)
    }

    pub fn add(&self, other: &PiecewiseAffine) -> Result<PiecewiseAffine> {
        self.combine(other, |a, b| a + b)
    }

    /// `x ↦ f(x) − x`.
    pub fn minus_identity(&self) -> PiecewiseAffine {
        let node_values = self.nodes.iter().zip(&self.node_values).map(|(x, y)| y - x).collect();
        let left = (0..self.pieces()).map(|k| &self.left[k] - &self.nodes[k]).collect();
        let right = (0..self.pieces()).map(|k| &self.right[k] - &self.nodes[k + 1]).collect();
        PiecewiseAffine {
            nodes: self.nodes.clone(),
            node_values,
            left,
            right,
        }
    }

    /// Largest and smallest values attained or approached.
    pub fn value_range(&self) -> (Q, Q) {
        let all = self.node_values.iter().chain(&self.left).chain(&self.right);
        let lo = all.clone().min().unwrap().clone();
        let hi = all.max().unwrap().clone();
        (lo, hi)
    }

    /// Exact image of a subset of the domain.
    pub fn image(&self, set: &IntervalSet) -> IntervalSet {
        let mut out = Vec::new();
        for (k, x) in self.nodes.iter().enumerate() {
            if set.contains(x) {
                out.push(Interval::point(self.node_values[k].clone()));
            }
        }
        for k in 0..self.pieces() {
            let piece = Interval::open(self.nodes[k].clone(), self.nodes[k + 1].clone());
            let s = self.slope(k);
            for c in set.parts() {
                let part = c.intersect(&piece);
                if part.is_empty() {
                    continue;
                }
                let (a, b) = (self.piece_value(k, &part.lo), self.piece_value(k, &part.hi));
                out.push(match s.cmp(&Q::zero()) {
                    Ordering::Equal => Interval::point(a),
                    Ordering::Greater => Interval {
                        lo: a,
                        hi: b,
                        lo_closed: part.lo_closed,
                        hi_closed: part.hi_closed,
                    },
                    Ordering::Less => Interval {
                        lo: b,
                        hi: a,
                        lo_closed: part.hi_closed,
                        hi_closed: part.lo_closed,
                    },
                });
            }
        }
        IntervalSet::from_intervals(out)
    }

    /// Exact preimage `{x : f(x) ∈ set}`.
    pub fn preimage(&self, set: &IntervalSet) -> IntervalSet {
        let mut out = Vec::new();
        for (k, x) in self.nodes.iter().enumerate() {
            if set.contains(&self.node_values[k]) {
                out.push(Interval::point(x.clone()));
            }
        }
        for k in 0..self.pieces() {
            let piece = Interval::open(self.nodes[k].clone(), self.nodes[k + 1].clone());
            let s = self.slope(k);
            if s.is_zero() {
                if set.contains(&self.left[k]) {
                    out.push(piece);
                }
                continue;
            }
            let inv = |y: &Q| &self.nodes[k] + (y - &self.left[k]) / &s;
            for c in set.parts() {
                let pre = if s.is_positive() {
                    Interval {
                        lo: inv(&c.lo),
                        hi: inv(&c.hi),
                        lo_closed: c.lo_closed,
                        hi_closed: c.hi_closed,
                    }
                } else {
                    Interval {
                        lo: inv(&c.hi),
                        hi: inv(&c.lo),
                        lo_closed: c.hi_closed,
                        hi_closed: c.lo_closed,
                    }
                };
                let part = pre.intersect(&piece);
                if !part.is_empty() {
                    out.push(part);
                }
            }
        }
        IntervalSet::from_intervals(out)
    }

    pub fn level_set(&self, c: &Q) -> IntervalSet {
        self.preimage(&IntervalSet::point(c.clone()))
    }

    /// Interior nodes with `|f(x^+) − f(x^-)| ≥ epsilon`.
    pub fn jumps(&self, epsilon: &Q) -> Vec<(Q, Q)> {
        (1..self.nodes.len() - 1)
            .filter_map(|k| {
                let size = &self.left[k] - &self.right[k - 1];
                (size.abs() >= *epsilon).then(|| (self.nodes[k].clone(), size))
            })
            .collect()
    }
}

/// A nondecreasing [`PiecewiseAffine`] map.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MonotoneStepFunction(PiecewiseAffine);

impl std::ops::Deref for MonotoneStepFunction {
    type Target = PiecewiseAffine;

    fn deref(&self) -> &PiecewiseAffine {
        &self.0
    }
}

impl MonotoneStepFunction {
    pub fn new(f: PiecewiseAffine) -> Result<MonotoneStepFunction> {
        // the chain f(x_0) ≤ f(x_0^+) ≤ f(x_1^-) ≤ f(x_1) ≤ f(x_1^+) ≤ … must be sorted
        let mut chain = vec![&f.node_values[0]];
        for k in 0..f.pieces() {
            chain.extend([&f.left[k], &f.right[k], &f.node_values[k + 1]]);
        }
        if let Some(w) = chain.windows(2).position(|w| w[0] > w[1]) {
            return Err(Error::InvalidInput(format!(
                "not nondecreasing: {} > {} (position {w})",
                chain[w], chain[w + 1]
            )));
        }
        Ok(MonotoneStepFunction(f))
    }

    pub fn from_parts(nodes: Vec<Q>, node_values: Vec<Q>, left: Vec<Q>, right: Vec<Q>) -> Result<MonotoneStepFunction> {
        MonotoneStepFunction::new(PiecewiseAffine::new(nodes, node_values, left, right)?)
    }

    pub fn identity(lo: Q, hi: Q) -> MonotoneStepFunction {
        MonotoneStepFunction(PiecewiseAffine::interpolate(vec![lo.clone(), hi.clone()], vec![lo, hi]).unwrap())
    }

    pub fn constant(lo: Q, hi: Q, c: Q) -> MonotoneStepFunction {
        MonotoneStepFunction(PiecewiseAffine::interpolate(vec![lo, hi], vec![c.clone(), c]).unwrap())
    }

    pub fn as_affine(&self) -> &PiecewiseAffine {
        &self.0
    }

    /// Affine rescaling of the values into `[lo, hi]` (order preserving).
    pub fn rescaled_into(&self, lo: &Q, hi: &Q) -> MonotoneStepFunction {
        let (a, b) = self.value_range();
        let map = |y: &Q| {
            if a == b {
                (lo + hi) / q(2, 1)
            } else {
                lo + (y - &a) * (hi - lo) / (&b - &a)
            }
        };
        let f = &self.0;
        MonotoneStepFunction(PiecewiseAffine {
            nodes: f.nodes.clone(),
            node_values: f.node_values.iter().map(map).collect(),
            left: f.left.iter().map(map).collect(),
            right: f.right.iter().map(map).collect(),
        })
    }
}

fn rand_q<R: Rng>(rng: &mut R, lo: i64, hi: i64, den: i64) -> Q {
    q(rng.gen_range(lo..=hi), den)
}

/// Random nondecreasing map on `[-1, 1]` with `pieces` affine pieces and at
/// most `max_jumps` jumps, with about a tenth each of flat and slope-one pieces.
pub fn random_monotone<R: Rng>(rng: &mut R, pieces: usize, max_jumps: usize) -> MonotoneStepFunction {
    const DEN: i64 = 96;
    let pieces = pieces.clamp(1, DEN as usize - 1);
    let mut interior: Vec<i64> = Vec::new();
    while interior.len() < pieces - 1 {
        let k = rng.gen_range(-DEN + 1..DEN);
        if !interior.contains(&k) {
            interior.push(k);
        }
    }
    interior.sort_unstable();
    let nodes: Vec<Q> = std::iter::once(q(-1, 1))
        .chain(interior.iter().map(|&k| q(k, DEN)))
        .chain(std::iter::once(q(1, 1)))
        .collect();
    let mut jump_nodes: Vec<usize> = (1..pieces).collect();
    while jump_nodes.len() > max_jumps {
        jump_nodes.remove(rng.gen_range(0..jump_nodes.len()));
    }
    let start = &nodes[0] + rand_q(rng, -8, 8, 64);
    let mut node_values = vec![start.clone()];
    let (mut left, mut right) = (Vec::new(), Vec::new());
    let mut y = start;
    for k in 0..pieces {
        if k > 0 && jump_nodes.contains(&k) && rng.gen_bool(0.8) {
            // jump split around the node value
            let v = &y + rand_q(rng, 0, 16, 128);
            *node_values.last_mut().unwrap() = v.clone();
            y = v + rand_q(rng, 0, 16, 128);
        }
        let width = &nodes[k + 1] - &nodes[k];
        let roll: f64 = rng.gen();
        let slope = if roll < 0.1 {
            Q::zero()
        } else if roll < 0.2 {
            Q::one()
        } else {
            rand_q(rng, 0, 32, 16)
        };
        left.push(y.clone());
        y = &y + slope * width;
        right.push(y.clone());
        node_values.push(y.clone());
    }
    MonotoneStepFunction::from_parts(nodes, node_values, left, right).expect("generator builds monotone maps")
}

/// `V(f; [a, b])` together with the breakpoint partition and its sum.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VariationReport {
    pub a: Q,
    pub b: Q,
    pub value: Q,
    /// `a`, the nodes inside, and `b`.
    pub witness: Vec<Q>,
    /// `Σ |f(t_{i+1}) − f(t_i)|` over `witness`; equals `value` when f is continuous.
    pub witness_sum: Q,
}

fn check_subinterval(f: &PiecewiseAffine, a: &Q, b: &Q) -> Result<()> {
    let (lo, hi) = f.domain();
    if a > b || a < lo || b > hi {
        return Err(Error::OutsideDomain(format!("[{a}, {b}] not inside [{lo}, {hi}]")));
    }
    Ok(())
}

/// Exact total variation: rises of the pieces plus both half-jumps at every node.
pub fn total_variation(f: &PiecewiseAffine, a: &Q, b: &Q) -> Result<VariationReport> {
    check_subinterval(f, a, b)?;
    let mut value = Q::zero();
    if a < b {
        for k in 0..f.pieces() {
            let lo = a.max(&f.nodes[k]);
            let hi = b.min(&f.nodes[k + 1]);
            if lo < hi {
                value += f.slope(k).abs() * (hi - lo);
            }
        }
        let m = f.nodes.len();
        for (k, x) in f.nodes.iter().enumerate() {
            if x < a || x > b {
                continue;
            }
            let fx = &f.node_values[k];
            if k > 0 && x > a {
                value += (fx - &f.right[k - 1]).abs();
            }
            if k + 1 < m && x < b {
                value += (&f.left[k] - fx).abs();
            }
        }
    }
    let mut witness = vec![a.clone()];
    witness.extend(f.nodes.iter().filter(|x| *x > a && *x < b).cloned());
    if b > a {
        witness.push(b.clone());
    }
    let mut witness_sum = Q::zero();
    for w in witness.windows(2) {
        witness_sum += (f.eval(&w[1])? - f.eval(&w[0])?).abs();
    }
    Ok(VariationReport {
        a: a.clone(),
        b: b.clone(),
        value,
        witness,
        witness_sum,
    })
}

fn check_disjoint(f: &PiecewiseAffine, intervals: &[(Q, Q)]) -> Result<()> {
    for (a, b) in intervals {
        check_subinterval(f, a, b)?;
    }
    let mut sorted: Vec<&(Q, Q)> = intervals.iter().collect();
    sorted.sort();
    for w in sorted.windows(2) {
        if w[1].0 < w[0].1 {
            return Err(Error::OverlappingIntervals(format!(
                "[{}, {}] and [{}, {}]",
                w[0].0, w[0].1, w[1].0, w[1].1
            )));
        }
    }
    Ok(())
}

fn variation_sum(f: &PiecewiseAffine, intervals: &[(Q, Q)]) -> Result<Q> {
    let mut s = Q::zero();
    for (a, b) in intervals {
        s += total_variation(f, a, b)?.value;
    }
    Ok(s)
}

/// `Σ V(f; I_k) ≤ V(f; domain)` for intervals with disjoint interiors.
pub fn variation_subadditivity_check(f: &PiecewiseAffine, intervals: &[(Q, Q)]) -> Result<bool> {
    check_disjoint(f, intervals)?;
    let (lo, hi) = f.domain();
    let total = total_variation(f, lo, hi)?.value;
    Ok(variation_sum(f, intervals)? <= total)
}

/// `Σ V(f; I_k) ≥ d − c` once the images `f(I_k)` are verified to cover `[c, d]`.
pub fn variation_cover_bound(f: &PiecewiseAffine, intervals: &[(Q, Q)], c: &Q, d: &Q) -> Result<bool> {
    if d < c {
        return Err(Error::InvalidInput(format!("empty target [{c}, {d}]")));
    }
    if d == c {
        return Ok(true);
    }
    check_disjoint(f, intervals)?;
    let images = intervals
        .iter()
        .map(|(a, b)| f.image(&IntervalSet::from_intervals(vec![Interval::closed(a.clone(), b.clone())])))
        .fold(IntervalSet::empty(), |acc, s| acc.union(&s));
    if !images.covers(c, d) {
        return Err(Error::CoverNotSatisfied(format!("images {images} do not cover [{c}, {d}]")));
    }
    Ok(variation_sum(f, intervals)? >= d - c)
}

pub fn find_jumps(f: &PiecewiseAffine, epsilon: &Q) -> Result<Vec<(Q, Q)>> {
    if !epsilon.is_positive() {
        return Err(Error::InvalidInput(format!("epsilon must be positive, got {epsilon}")));
    }
    Ok(f.jumps(epsilon))
}

/// `{x : l(x) + t = x}` as exact points and intervals.
pub fn fixed_point_set(l: &PiecewiseAffine, t: &Q) -> IntervalSet {
    l.minus_identity().level_set(&-t)
}

/// A verified translation pair.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PbbCertificate {
    pub s: Q,
    pub t: Q,
    /// `Fix(l1 + s)`.
    pub fix1: IntervalSet,
    /// `Fix(l2 + t)`.
    pub fix2: IntervalSet,
    /// `phi(fix2)`, disjoint from `fix1`.
    pub image: IntervalSet,
    pub checks: usize,
    pub levels: u32,
}

pub const PBB_DEFAULT_GRID: usize = 8;
pub const PBB_MAX_LEVELS: u32 = 12;

fn critical_gap(fs: &[&PiecewiseAffine]) -> Option<Q> {
    let mut vals: Vec<Q> = fs
        .iter()
        .flat_map(|f| f.node_values.iter().chain(&f.left).chain(&f.right).cloned())
        .collect();
    vals.sort();
    vals.dedup();
    vals.windows(2).map(|w| &w[1] - &w[0]).min()
}

/// Exact check that `phi(Fix(l2 + t)) ∩ Fix(l1 + s) = ∅`, routed through the
/// preimage `Fix(l2 + t) ∩ phi⁻¹(Fix(l1 + s))`.
pub fn pbb_verify(l1: &PiecewiseAffine, l2: &PiecewiseAffine, phi: &PiecewiseAffine, s: &Q, t: &Q) -> bool {
    let f1 = fixed_point_set(l1, s);
    let f2 = fixed_point_set(l2, t);
    f2.intersect(&phi.preimage(&f1)).is_empty()
}

/// Searches `|s|, |t| ≤ epsilon` on a dyadically refined grid for a pair whose
/// fixed-point sets are separated by `phi`.
pub fn pbb_search(
    l1: &MonotoneStepFunction,
    l2: &MonotoneStepFunction,
    phi: &MonotoneStepFunction,
    epsilon: &Q,
    grid_n: usize,
) -> Result<PbbCertificate> {
    if !epsilon.is_positive() {
        return Err(Error::InvalidInput(format!("epsilon must be positive, got {epsilon}")));
    }
    if grid_n == 0 {
        return Err(Error::InvalidInput("grid_n must be positive".into()));
    }
    l2.same_domain(phi)?;
    let (plo, phi_hi) = phi.value_range();
    let (a, b) = l1.domain();
    if plo < *a || phi_hi > *b {
        return Err(Error::InvalidInput(format!(
            "phi takes values in [{plo}, {phi_hi}], outside the domain [{a}, {b}] of l1"
        )));
    }
    let g1 = l1.minus_identity();
    let g2 = l2.minus_identity();
    let floor = critical_gap(&[&g1, &g2]).map(|g| g / q(2, 1));
    let mut checks = 0;
    for level in 0..=PBB_MAX_LEVELS {
        let n = grid_n << level;
        let step = epsilon * q(2, n as i64);
        let coord = |i: usize| epsilon * q(2 * i as i64 - n as i64, n as i64);
        for i in 0..=n {
            for j in 0..=n {
                if level > 0 && i % 2 == 0 && j % 2 == 0 {
                    continue;
                }
                let (s, t) = (coord(i), coord(j));
                checks += 1;
                let fix2 = g2.level_set(&-&t);
                let image = phi.image(&fix2);
                let fix1 = g1.level_set(&-&s);
                if !image.intersect(&fix1).is_empty() {
                    continue;
                }
                if !pbb_verify(l1, l2, phi, &s, &t) {
                    return Err(Error::PostconditionFailure(format!(
                        "image and preimage routes disagree at s = {s}, t = {t}"
                    )));
                }
                return Ok(PbbCertificate {
                    s,
                    t,
                    fix1,
                    fix2,
                    image,
                    checks,
                    levels: level,
                });
            }
        }
        // once the grid is finer than every gap between critical values no
        // new combinatorial case can appear
        if let Some(f) = &floor {
            if step < *f && level > 0 {
                return Err(Error::SearchExhausted(checks));
            }
        }
    }
    Err(Error::SearchExhausted(checks))
}
