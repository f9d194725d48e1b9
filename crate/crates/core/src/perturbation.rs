//! Compactly supported area-preserving bump translations and the procedure
//! that uses them to destroy trivial accessibility classes.

use std::sync::Arc;

use num_rational::BigRational;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::accessibility::{
    fd_jacobian, find_fixed_points, loop_generators, loop_map, trivial_set_scan_with, FixedPoints, TrivialScan,
    FIXED_POINT_GRID,
};
use crate::anosov::{cross, HeteroclinicQuad};
use crate::error::{Error, Result};
use crate::fiber::{singular_values, FiberMapFamily, Mat2, SkewProduct, IDENTITY};
use crate::holonomy::{project_su, FiberTransform, SuMap, SuPath, DEFAULT_TOL};
use crate::monotone::{pbb_search, MonotoneStepFunction, PbbCertificate, PBB_DEFAULT_GRID};
use crate::torus::{delta, norm, torus_dist, BumpProfile, FiberRegion, TorusPoint};

/// Step bound of the fourth-order flow integrator.
pub const MAX_FLOW_STEP: f64 = 1e-3;

/// Fiberwise Hamiltonian bump `h_x`: the time-`ψ_base(dist(x, base_center))`
/// flow of `χ(y) = ψ_fiber(|d|)·(d₂v₁ − d₁v₂)`, `d = y − fiber_center`.
///
/// Inside the fiber plateau the Hamiltonian field equals `v`, so a full
/// base bump translates the certified inner disk by `v`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BumpTranslation {
    pub base_center: TorusPoint,
    pub base_bump: BumpProfile,
    pub fiber_center: TorusPoint,
    pub fiber_bump: BumpProfile,
    pub v: [f64; 2],
}

impl BumpTranslation {
    pub fn new(
        base_center: TorusPoint,
        base_bump: BumpProfile,
        fiber_center: TorusPoint,
        fiber_bump: BumpProfile,
        v: [f64; 2],
    ) -> Result<BumpTranslation> {
        if base_bump.outer_radius() >= 0.5 || fiber_bump.outer_radius() >= 0.5 {
            return Err(Error::InvalidInput(
                "bump supports must have outer radius < 0.5 to sit in one chart".into(),
            ));
        }
        if !(v[0].is_finite() && v[1].is_finite()) {
            return Err(Error::NonFinite(v[0], v[1]));
        }
        Ok(BumpTranslation {
            base_center,
            base_bump,
            fiber_center,
            fiber_bump,
            v,
        })
    }

    /// Largest admissible `‖v‖` (exclusive): half the fiber transition band.
    pub fn max_translation(&self) -> f64 {
        0.5 * (self.fiber_bump.outer_radius() - self.fiber_bump.inner_radius())
    }

    /// Radius of the fiber disk on which a full bump is exactly `y ↦ y + v`.
    pub fn certified_radius(&self) -> f64 {
        self.fiber_bump.inner_radius() - norm(self.v)
    }

    /// Flow time at base point `x`.
    #[inline]
    pub fn time(&self, x: &TorusPoint) -> f64 {
        self.base_bump.value(torus_dist(x, &self.base_center))
    }

    fn check_escape(&self) -> Result<()> {
        let n = norm(self.v);
        let limit = self.max_translation();
        if n >= limit {
            return Err(Error::BumpEscape { norm: n, limit });
        }
        Ok(())
    }

    #[inline]
    fn field(&self, d: [f64; 2]) -> [f64; 2] {
        let r = norm(d);
        let fb = &self.fiber_bump;
        let (v1, v2) = (self.v[0], self.v[1]);
        let psi = fb.value(r);
        if r <= fb.inner_radius() {
            return [v1, v2];
        }
        let h0 = d[1] * v1 - d[0] * v2;
        let g = fb.d1(r) / r;
        let chi1 = g * d[0] * h0 - psi * v2;
        let chi2 = g * d[1] * h0 + psi * v1;
        [chi2, -chi1]
    }

    #[inline]
    fn field_jacobian(&self, d: [f64; 2]) -> Mat2 {
        let r = norm(d);
        let fb = &self.fiber_bump;
        if r <= fb.inner_radius() || r >= fb.outer_radius() {
            return [[0.0, 0.0], [0.0, 0.0]];
        }
        let (v1, v2) = (self.v[0], self.v[1]);
        let h0 = d[1] * v1 - d[0] * v2;
        let dh = [-v2, v1];
        let p1 = fb.d1(r);
        let p2 = fb.d2(r);
        let g = p1 / r;
        let a = (p2 - g) / (r * r);
        let hess = |i: usize, j: usize| {
            let delta_ij = if i == j { 1.0 } else { 0.0 };
            a * d[i] * d[j] * h0 + g * delta_ij * h0 + g * (d[i] * dh[j] + d[j] * dh[i])
        };
        let (h11, h12, h22) = (hess(0, 0), hess(0, 1), hess(1, 1));
        [[h12, h22], [-h11, -h12]]
    }

    /// Integrates the flow for time `t` from offset `d`, optionally with the
    /// variational equation.
    fn flow(&self, d: [f64; 2], t: f64, with_jacobian: bool) -> ([f64; 2], Mat2) {
        let inner = self.fiber_bump.inner_radius();
        let r = norm(d);
        if r >= self.fiber_bump.outer_radius() || t == 0.0 {
            return (d, IDENTITY);
        }
        if r + t.abs() * norm(self.v) <= inner {
            return ([d[0] + t * self.v[0], d[1] + t * self.v[1]], IDENTITY);
        }
        let steps = (t.abs() / MAX_FLOW_STEP).ceil().max(1.0) as usize;
        let h = t / steps as f64;
        let mut y = d;
        let mut jac = IDENTITY;
        let axpy = |y: [f64; 2], k: [f64; 2], s: f64| [y[0] + s * k[0], y[1] + s * k[1]];
        let maxpy = |j: Mat2, k: Mat2, s: f64| {
            [
                [j[0][0] + s * k[0][0], j[0][1] + s * k[0][1]],
                [j[1][0] + s * k[1][0], j[1][1] + s * k[1][1]],
            ]
        };
        for _ in 0..steps {
            let k1 = self.field(y);
            let y2 = axpy(y, k1, 0.5 * h);
            let k2 = self.field(y2);
            let y3 = axpy(y, k2, 0.5 * h);
            let k3 = self.field(y3);
            let y4 = axpy(y, k3, h);
            let k4 = self.field(y4);
            if with_jacobian {
                let m1 = crate::fiber::mat_mul(&self.field_jacobian(y), &jac);
                let m2 = crate::fiber::mat_mul(&self.field_jacobian(y2), &maxpy(jac, m1, 0.5 * h));
                let m3 = crate::fiber::mat_mul(&self.field_jacobian(y3), &maxpy(jac, m2, 0.5 * h));
                let m4 = crate::fiber::mat_mul(&self.field_jacobian(y4), &maxpy(jac, m3, h));
                for i in 0..2 {
                    for j in 0..2 {
                        jac[i][j] += h / 6.0 * (m1[i][j] + 2.0 * m2[i][j] + 2.0 * m3[i][j] + m4[i][j]);
                    }
                }
            }
            for i in 0..2 {
                y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
        }
        (y, jac)
    }

    fn run(&self, x: &TorusPoint, y: &TorusPoint, sign: f64, with_jac: bool) -> Result<(TorusPoint, Mat2)> {
        let t = self.time(x);
        if t == 0.0 {
            return Ok((*y, IDENTITY));
        }
        let d = delta(y, &self.fiber_center);
        if norm(d) >= self.fiber_bump.outer_radius() {
            return Ok((*y, IDENTITY));
        }
        self.check_escape()?;
        let (e, jac) = self.flow(d, sign * t, with_jac);
        Ok((self.fiber_center.shifted(e), jac))
    }

    /// `h_x(y)`; bitwise identity outside the support product.
    pub fn apply(&self, x: &TorusPoint, y: &TorusPoint) -> Result<TorusPoint> {
        Ok(self.run(x, y, 1.0, false)?.0)
    }

    /// `h_x^{-1}(y)`, the backward-time flow.
    pub fn apply_inverse(&self, x: &TorusPoint, y: &TorusPoint) -> Result<TorusPoint> {
        Ok(self.run(x, y, -1.0, false)?.0)
    }

    /// `h_x(y)` together with `Dh_x(y)` from the variational equation.
    pub fn apply_with_jacobian(&self, x: &TorusPoint, y: &TorusPoint) -> Result<(TorusPoint, Mat2)> {
        self.run(x, y, 1.0, true)
    }

    /// Upper bound on the base-Lipschitz constant of `x ↦ h_x`.
    pub fn base_lipschitz(&self) -> f64 {
        let field_bound =
            norm(self.v) * (1.0 + self.fiber_bump.outer_radius() * self.fiber_bump.max_slope());
        self.base_bump.max_slope() * field_bound
    }

    pub fn base_support_overlaps(&self, other: &BumpTranslation) -> bool {
        torus_dist(&self.base_center, &other.base_center)
            < self.base_bump.outer_radius() + other.base_bump.outer_radius()
    }
}

/// `h_x(y)` for a single bump.
pub fn apply_bump(bt: &BumpTranslation, x: &TorusPoint, y: &TorusPoint) -> Result<TorusPoint> {
    bt.apply(x, y)
}

/// Composes the fiber maps with bump translations, `g'_x = g_x ∘ h_x`.
pub fn perturb_skew(sp: &SkewProduct, bumps: &[BumpTranslation]) -> Result<SkewProduct> {
    if bumps.is_empty() {
        return Ok(sp.clone());
    }
    let (inner, mut all) = match &sp.family {
        FiberMapFamily::Perturbed { inner, bumps } => (inner.clone(), bumps.clone()),
        other => (Box::new(other.clone()), Vec::new()),
    };
    for b in bumps {
        if let Some(k) = all.iter().position(|o| o.base_support_overlaps(b)) {
            return Err(Error::Overlap(format!(
                "bump at ({:.6}, {:.6}) overlaps bump {k} at ({:.6}, {:.6})",
                b.base_center.u, b.base_center.v, all[k].base_center.u, all[k].base_center.v
            )));
        }
        all.push(b.clone());
    }
    Ok(SkewProduct::new(
        sp.base.clone(),
        FiberMapFamily::Perturbed { inner, bumps: all },
    ))
}

/// Knobs of [`destroy_trivial_class`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DestroyConfig {
    /// Point of the fiber over `x` whose class is destroyed; the region `V_x` is a disk around it.
    pub fiber_target: TorusPoint,
    pub fiber_inner: f64,
    pub fiber_outer: f64,
    /// Base bump radii as fractions of the quad's ball radii.
    pub base_inner_frac: f64,
    pub base_outer_frac: f64,
    pub tol: f64,
    pub max_draws: usize,
    pub sigma_min: f64,
    pub scan_grid_n: usize,
    pub seed: u64,
}

impl Default for DestroyConfig {
    fn default() -> Self {
        DestroyConfig {
            fiber_target: TorusPoint { u: 0.5, v: 0.5 },
            fiber_inner: 0.25,
            fiber_outer: 0.45,
            base_inner_frac: 0.3,
            base_outer_frac: 0.9,
            tol: DEFAULT_TOL,
            max_draws: 100,
            sigma_min: 1e-4,
            scan_grid_n: 32,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct DestroyOutcome {
    pub sp: SkewProduct,
    pub bumps: [BumpTranslation; 2],
    /// Certified region in the fiber over `x`.
    pub v_x: FiberRegion,
    pub draws: usize,
    /// Fixed points of the first perturbed loop map inside `V_x`.
    pub residual_fixed: Vec<TorusPoint>,
    pub scan: TrivialScan,
    pub min_displacement: f64,
}

/// The first three legs `x → z_i → p_i → w_i` of loop `i` (0-based).
fn approach(sp: &Arc<SkewProduct>, quad: &HeteroclinicQuad, i: usize, tol: f64) -> Result<SuMap> {
    project_su(sp, &SuPath::new(quad.loop_legs(i)[..3].to_vec()), tol)
}

struct Shifted<'a> {
    inner: &'a dyn FiberTransform,
    v: [f64; 2],
}

impl FiberTransform for Shifted<'_> {
    fn apply(&self, y: &TorusPoint) -> Result<TorusPoint> {
        Ok(self.inner.apply(y)?.shifted(self.v))
    }

    fn apply_inverse(&self, y: &TorusPoint) -> Result<TorusPoint> {
        self.inner.apply_inverse(&y.shifted([-self.v[0], -self.v[1]]))
    }
}

fn spectral_norm(m: &Mat2) -> f64 {
    singular_values(m).0
}

/// Largest disk around `y0` that the approach maps of both loops carry into the
/// certified plateau disks of their bumps.
fn certified_disk(approaches: &[SuMap; 2], y0: &TorusPoint, radii: [f64; 2]) -> Result<FiberRegion> {
    let probe = FiberRegion::Disk {
        center: *y0,
        radius: radii[0].min(radii[1]),
    };
    let mut rho = f64::INFINITY;
    for (r, rad) in approaches.iter().zip(radii) {
        let mut lip: f64 = 1.0;
        for y in probe.grid(12).iter().chain(std::iter::once(y0)) {
            lip = lip.max(spectral_norm(&fd_jacobian(r, y, 1e-6)?));
        }
        rho = rho.min(0.95 * rad / lip);
    }
    Ok(FiberRegion::Disk {
        center: *y0,
        radius: rho,
    })
}

fn draw_translation(rng: &mut ChaCha8Rng, delta_max: f64) -> [f64; 2] {
    let r = delta_max * rng.gen_range(0.5..1.0);
    let a = rng.gen_range(0.0..std::f64::consts::TAU);
    [r * a.cos(), r * a.sin()]
}

/// Perturbs `sp` near `w_1` and `w_2` of `quad` so that no point of the
/// certified region `V_x` in the fiber over `x` stays fixed by both loop maps.
pub fn destroy_trivial_class(
    sp: &SkewProduct,
    quad: &HeteroclinicQuad,
    epsilon: f64,
    config: &DestroyConfig,
) -> Result<DestroyOutcome> {
    if !(epsilon > 0.0) {
        return Err(Error::InvalidInput(format!("epsilon must be positive, got {epsilon}")));
    }
    quad.validate(&sp.base)?;
    let tol = config.tol;
    let base = Arc::new(sp.clone());
    let fiber_bump = BumpProfile::new(config.fiber_inner, config.fiber_outer)?;
    let base_bumps = [0, 1].map(|i| {
        BumpProfile::new(
            config.base_inner_frac * quad.u_radius[i],
            config.base_outer_frac * quad.u_radius[i],
        )
    });
    let base_bumps = [base_bumps[0].clone()?, base_bumps[1].clone()?];
    let delta_max = epsilon.min(0.99 * 0.5 * (config.fiber_outer - config.fiber_inner));
    let y0 = config.fiber_target;
    let approaches = [approach(&base, quad, 0, tol)?, approach(&base, quad, 1, tol)?];
    let centers = [approaches[0].apply(&y0)?, approaches[1].apply(&y0)?];
    let v_x = certified_disk(&approaches, &y0, [config.fiber_inner - delta_max; 2])?;
    let rect = v_x.bounding_rect();
    let l1 = loop_map(&base, quad, 1, tol)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    // −v must be a regular value of ℓ₁ − id on V_x
    let mut draws = 0;
    let v1 = loop {
        if draws == config.max_draws {
            return Err(Error::RegularValueFailure(draws));
        }
        draws += 1;
        let v = draw_translation(&mut rng, delta_max);
        let shifted = Shifted { inner: &l1, v };
        let zeros = match find_fixed_points(&shifted, &rect, tol)? {
            FixedPoints::IdentityLike => continue,
            FixedPoints::Points(p) => p,
        };
        let mut regular = true;
        for q in &zeros {
            let mut j = fd_jacobian(&l1, q, 1e-6)?;
            j[0][0] -= 1.0;
            j[1][1] -= 1.0;
            if singular_values(&j).1 <= config.sigma_min {
                regular = false;
                break;
            }
        }
        if regular {
            break v;
        }
    };
    let h1 = BumpTranslation::new(quad.w[0], base_bumps[0].clone(), centers[0], fiber_bump.clone(), v1)?;
    let sp1 = Arc::new(perturb_skew(sp, std::slice::from_ref(&h1))?);
    let l1p = loop_map(&sp1, quad, 1, tol)?;
    let residual_fixed: Vec<TorusPoint> = match find_fixed_points(&l1p, &rect, tol)? {
        FixedPoints::IdentityLike => rect.grid(FIXED_POINT_GRID).into_iter().map(TorusPoint::from_lift).collect(),
        FixedPoints::Points(p) => p,
    }
    .into_iter()
    .filter(|q| v_x.contains_lift(q.lift()) || v_x.contains_lift(near_lift(q, &y0)))
    .collect();

    // second translation: non-parallel to v1 and moving every residual fixed point
    loop {
        if draws == config.max_draws {
            return Err(Error::RegularValueFailure(draws));
        }
        draws += 1;
        let v2 = draw_translation(&mut rng, delta_max);
        if cross(v1, v2).abs() < 0.5 * norm(v1) * norm(v2) {
            continue;
        }
        let h2 = BumpTranslation::new(quad.w[1], base_bumps[1].clone(), centers[1], fiber_bump.clone(), v2)?;
        let g = perturb_skew(sp, &[h1.clone(), h2.clone()])?;
        let ga = Arc::new(g.clone());
        let gens = loop_generators(&ga, std::slice::from_ref(quad), tol)?;
        let mut moved = true;
        for q in &residual_fixed {
            if torus_dist(&gens[1].apply(q)?, q) < 10.0 * tol {
                moved = false;
                break;
            }
        }
        if !moved {
            continue;
        }
        let refs: Vec<&dyn FiberTransform> = gens.iter().map(|l| l as &dyn FiberTransform).collect();
        let scan = trivial_set_scan_with(&refs, v_x.grid(config.scan_grid_n), tol)?;
        if !scan.fixed.is_empty() {
            let pts: Vec<String> = scan.fixed.iter().take(8).map(|p| format!("({:.6}, {:.6})", p.u, p.v)).collect();
            return Err(Error::PostconditionFailure(format!(
                "{} grid points of V_x remain fixed by all loop maps: {}",
                scan.fixed.len(),
                pts.join(", ")
            )));
        }
        let min_displacement = scan.max_displacement.iter().copied().fold(f64::INFINITY, f64::min);
        return Ok(DestroyOutcome {
            sp: g,
            bumps: [h1, h2],
            v_x,
            draws,
            residual_fixed,
            scan,
            min_displacement,
        });
    }
}

/// Lift of `q` closest to `reference`.
fn near_lift(q: &TorusPoint, reference: &TorusPoint) -> [f64; 2] {
    let d = delta(q, reference);
    [reference.u + d[0], reference.v + d[1]]
}

/// Chooses the translation parameters `(s, t)` of the two curve-crossing maps
/// so that the shifted images avoid each other.
pub fn select_translation_pair(
    l1: &MonotoneStepFunction,
    l2: &MonotoneStepFunction,
    phi: &MonotoneStepFunction,
    epsilon: &BigRational,
) -> Result<PbbCertificate> {
    pbb_search(l1, l2, phi, epsilon, PBB_DEFAULT_GRID)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::anosov::cat_map;
    use crate::fiber::det;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn sample_bump(v: [f64; 2]) -> BumpTranslation {
        BumpTranslation::new(
            TorusPoint { u: 0.2, v: 0.3 },
            BumpProfile::new(0.02, 0.05).unwrap(),
            TorusPoint { u: 0.5, v: 0.5 },
            BumpProfile::new(0.15, 0.35).unwrap(),
            v,
        )
        .unwrap()
    }

    fn fd_jacobian(b: &BumpTranslation, x: &TorusPoint, y: &TorusPoint) -> Mat2 {
        let h = 1e-6;
        let mut jac = [[0.0; 2]; 2];
        for k in 0..2 {
            let mut e = [0.0; 2];
            e[k] = h;
            let p = b.apply(x, &y.shifted(e)).unwrap();
            let m = b.apply(x, &y.shifted([-e[0], -e[1]])).unwrap();
            let d = delta(&p, &m);
            jac[0][k] = d[0] / (2.0 * h);
            jac[1][k] = d[1] / (2.0 * h);
        }
        jac
    }

    #[test]
    fn identity_outside_base_support_bitwise() {
        let b = sample_bump([0.03, 0.01]);
        let x = TorusPoint { u: 0.7, v: 0.7 };
        let y = TorusPoint { u: 0.51, v: 0.49 };
        let out = b.apply(&x, &y).unwrap();
        assert_eq!(out.u.to_bits(), y.u.to_bits());
        assert_eq!(out.v.to_bits(), y.v.to_bits());
    }

    #[test]
    fn centre_translates_by_v() {
        let v = [0.03, -0.02];
        let b = sample_bump(v);
        let out = b.apply(&b.base_center, &b.fiber_center).unwrap();
        let expect = b.fiber_center.shifted(v);
        assert!(torus_dist(&out, &expect) < 1e-8);
    }

    #[test]
    fn escape_is_reported() {
        let b = sample_bump([0.1, 0.05]);
        assert!(matches!(
            b.apply(&b.base_center, &b.fiber_center),
            Err(Error::BumpEscape { .. })
        ));
    }

    #[test]
    fn flow_preserves_area() {
        let b = sample_bump([0.04, 0.03]);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..1000 {
            let x = b.base_center.shifted([rng.gen_range(-0.05..0.05), rng.gen_range(-0.05..0.05)]);
            let y = b.fiber_center.shifted([rng.gen_range(-0.36..0.36), rng.gen_range(-0.36..0.36)]);
            let (_, jac) = b.apply_with_jacobian(&x, &y).unwrap();
            assert!((det(&jac) - 1.0).abs() < 1e-8, "variational det {}", det(&jac));
            let fd = fd_jacobian(&b, &x, &y);
            assert!((det(&fd) - 1.0).abs() < 1e-8, "finite-difference det {}", det(&fd));
            for i in 0..2 {
                for j in 0..2 {
                    assert!((fd[i][j] - jac[i][j]).abs() < 1e-6);
                }
            }
        }
    }

    #[test]
    fn inverse_undoes_the_flow() {
        let b = sample_bump([0.04, -0.03]);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..200 {
            let x = b.base_center.shifted([rng.gen_range(-0.04..0.04), 0.0]);
            let y = b.fiber_center.shifted([rng.gen_range(-0.4..0.4), rng.gen_range(-0.4..0.4)]);
            let back = b.apply_inverse(&x, &b.apply(&x, &y).unwrap()).unwrap();
            assert!(torus_dist(&back, &y) < 1e-10);
        }
    }

    #[test]
    fn plateau_is_a_translation() {
        let v = [0.02, 0.035];
        let b = sample_bump(v);
        let r = b.certified_radius();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..500 {
            let ang: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
            let rad = r * rng.gen::<f64>().sqrt();
            let y = b.fiber_center.shifted([rad * ang.cos(), rad * ang.sin()]);
            let out = b.apply(&b.base_center, &y).unwrap();
            assert!(torus_dist(&out, &y.shifted(v)) < 1e-8);
        }
    }

    #[test]
    fn support_exactness_by_rejection_sampling() {
        let b = sample_bump([0.03, 0.03]);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut checked = 0;
        while checked < 2000 {
            let x = TorusPoint { u: rng.gen(), v: rng.gen() };
            let y = TorusPoint { u: rng.gen(), v: rng.gen() };
            let inside = torus_dist(&x, &b.base_center) < b.base_bump.outer_radius()
                && torus_dist(&y, &b.fiber_center) < b.fiber_bump.outer_radius();
            if inside {
                continue;
            }
            assert_eq!(b.apply(&x, &y).unwrap(), y);
            checked += 1;
        }
    }

    #[test]
    fn perturb_skew_checks_overlap() {
        let sp = SkewProduct::new(cat_map(), FiberMapFamily::identity());
        assert_eq!(perturb_skew(&sp, &[]).unwrap(), sp);
        let b1 = sample_bump([0.01, 0.0]);
        let mut b2 = b1.clone();
        b2.base_center = TorusPoint { u: 0.23, v: 0.3 };
        assert!(matches!(perturb_skew(&sp, &[b1.clone(), b2]), Err(Error::Overlap(_))));
        let mut b3 = b1.clone();
        b3.base_center = TorusPoint { u: 0.7, v: 0.3 };
        let p = perturb_skew(&sp, std::slice::from_ref(&b1)).unwrap();
        let p2 = perturb_skew(&p, &[b3]).unwrap();
        match p2.family {
            FiberMapFamily::Perturbed { ref bumps, .. } => assert_eq!(bumps.len(), 2),
            _ => panic!("expected perturbed family"),
        }
        assert!(matches!(perturb_skew(&p, &[b1]), Err(Error::Overlap(_))));
    }

    #[test]
    fn perturbed_compositions_stay_conservative() {
        let b = sample_bump([0.04, 0.02]);
        let sp = perturb_skew(&SkewProduct::new(cat_map(), FiberMapFamily::identity()), std::slice::from_ref(&b)).unwrap();
        let mut y = b.fiber_center.shifted([0.2, 0.1]);
        let mut jac = IDENTITY;
        for k in 0..1000 {
            let x = b.base_center.shifted([0.01 * ((k % 7) as f64 - 3.0) / 3.0, 0.0]);
            let step = sp.fiber_jacobian(&x, &y).unwrap();
            jac = crate::fiber::mat_mul(&step, &jac);
            y = sp.fiber_map(&x, &y).unwrap();
        }
        assert!((det(&jac) - 1.0).abs() < 1e-7, "det after 1000 steps {}", det(&jac));
    }

    mod destroy {
        use super::*;
        use crate::accessibility::loop_map;
        use crate::anosov::{build_quad, LeafKind};
        use crate::fiber::certify_partial_hyperbolicity;
        use crate::holonomy::{stable_holonomy, unstable_holonomy};
        use crate::torus::FiberRect;

        fn setup() -> (SkewProduct, HeteroclinicQuad) {
            let a = cat_map();
            let q = build_quad(&a, TorusPoint::ORIGIN, 0.1, 10, 50).unwrap();
            (SkewProduct::new(a, FiberMapFamily::identity()), q)
        }

        #[test]
        fn destroys_the_trivial_class_over_x() {
            let (sp, q) = setup();
            let out = destroy_trivial_class(&sp, &q, 0.05, &DestroyConfig::default()).unwrap();
            assert!(out.scan.fixed.is_empty());
            let vmin = out.bumps.iter().map(|b| norm(b.v)).fold(f64::INFINITY, f64::min);
            assert!(out.min_displacement >= vmin / 2.0, "{} vs {vmin}", out.min_displacement);
            assert!(cross(out.bumps[0].v, out.bumps[1].v).abs() > 0.0);
            // fibers over x and the periodic points are untouched
            for b in [q.x, q.p[0], q.p[1]] {
                for p in FiberRect::unit().grid(8) {
                    let y = TorusPoint::from_lift(p);
                    let gy = out.sp.fiber_map(&b, &y).unwrap();
                    assert_eq!((gy.u.to_bits(), gy.v.to_bits()), (y.u.to_bits(), y.v.to_bits()));
                }
            }
            // the unperturbed control is entirely trivial
            let base = Arc::new(sp.clone());
            let gens = loop_generators(&base, std::slice::from_ref(&q), DEFAULT_TOL).unwrap();
            let refs: Vec<&dyn FiberTransform> = gens.iter().map(|l| l as &dyn FiberTransform).collect();
            let control = trivial_set_scan_with(&refs, out.v_x.grid(16), DEFAULT_TOL).unwrap();
            assert_eq!(control.fixed.len(), control.grid.len());
        }

        #[test]
        fn rejects_non_positive_epsilon() {
            let (sp, q) = setup();
            assert!(matches!(
                destroy_trivial_class(&sp, &q, 0.0, &DestroyConfig::default()),
                Err(Error::InvalidInput(_))
            ));
        }

        #[test]
        fn holonomies_off_the_support_are_unchanged() {
            let (sp, q) = setup();
            let r = q.u_radius[0];
            let v = [0.03, 0.02];
            let bt = BumpTranslation::new(
                q.w[0],
                BumpProfile::new(0.3 * r, 0.9 * r).unwrap(),
                TorusPoint { u: 0.5, v: 0.5 },
                BumpProfile::new(0.25, 0.45).unwrap(),
                v,
            )
            .unwrap();
            let f = Arc::new(sp.clone());
            let g = Arc::new(perturb_skew(&sp, std::slice::from_ref(&bt)).unwrap());
            let legs = q.loop_legs(0);
            let grid: Vec<TorusPoint> = FiberRect::unit().grid(12).into_iter().map(TorusPoint::from_lift).collect();
            for leg in &legs[..3] {
                let build = |s: &Arc<SkewProduct>| match leg.kind {
                    LeafKind::Stable => stable_holonomy(s, leg.from, leg.to, DEFAULT_TOL).unwrap(),
                    LeafKind::Unstable => unstable_holonomy(s, leg.from, leg.to, DEFAULT_TOL).unwrap(),
                };
                let (hf, hg) = (build(&f), build(&g));
                for y in &grid {
                    assert!(torus_dist(&hf.apply(y).unwrap(), &hg.apply(y).unwrap()) < 10.0 * DEFAULT_TOL);
                }
            }
            // the leg leaving w picks up exactly the bump map
            let hf = stable_holonomy(&f, q.w[0], q.x, DEFAULT_TOL).unwrap();
            let hg = stable_holonomy(&g, q.w[0], q.x, DEFAULT_TOL).unwrap();
            for y in &grid {
                let expect = hf.apply(&bt.apply(&q.w[0], y).unwrap()).unwrap();
                assert!(torus_dist(&hg.apply(y).unwrap(), &expect) < 10.0 * DEFAULT_TOL);
            }
            let l2f = loop_map(&f, &q, 2, DEFAULT_TOL).unwrap();
            let l2g = loop_map(&g, &q, 2, DEFAULT_TOL).unwrap();
            for y in &grid {
                assert!(torus_dist(&l2f.apply(y).unwrap(), &l2g.apply(y).unwrap()) < 10.0 * DEFAULT_TOL);
            }
        }

        #[test]
        fn small_bumps_keep_domination() {
            let (sp, q) = setup();
            let r = q.u_radius[0];
            let bt = BumpTranslation::new(
                q.w[0],
                BumpProfile::new(0.3 * r, 0.9 * r).unwrap(),
                TorusPoint { u: 0.5, v: 0.5 },
                BumpProfile::new(0.25, 0.45).unwrap(),
                [0.006, -0.008],
            )
            .unwrap();
            let g = perturb_skew(&sp, &[bt]).unwrap();
            assert!(certify_partial_hyperbolicity(&g, 64).unwrap().dominated);
        }
    }
}
