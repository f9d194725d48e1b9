//! Area-preserving fiber map families `x ↦ g_x`, the skew product they define
//! over a linear Anosov base, and grid certification of domination and
//! center bunching.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::anosov::LinearAnosov;
use crate::error::{Error, Result};
use crate::perturbation::BumpTranslation;
use crate::torus::{torus_dist, BumpProfile, TorusPoint};

pub type Mat2 = [[f64; 2]; 2];

pub const IDENTITY: Mat2 = [[1.0, 0.0], [0.0, 1.0]];

#[inline]
pub fn mat_mul(a: &Mat2, b: &Mat2) -> Mat2 {
    [
        [
            a[0][0] * b[0][0] + a[0][1] * b[1][0],
            a[0][0] * b[0][1] + a[0][1] * b[1][1],
        ],
        [
            a[1][0] * b[0][0] + a[1][1] * b[1][0],
            a[1][0] * b[0][1] + a[1][1] * b[1][1],
        ],
    ]
}

#[inline]
pub fn det(m: &Mat2) -> f64 {
    m[0][0] * m[1][1] - m[0][1] * m[1][0]
}

/// Largest and smallest singular values of a 2×2 matrix.
pub fn singular_values(m: &Mat2) -> (f64, f64) {
    let (a, b, c, d) = (m[0][0], m[0][1], m[1][0], m[1][1]);
    let p = (a + d).hypot(c - b);
    let q = (a - d).hypot(b + c);
    (0.5 * (p + q), 0.5 * (p - q).abs())
}

/// The Lewowicz map `f_c(x, y) = (2x − k sin 2πx + y, x − k sin 2πx + y)`, `k = c/2π`.
pub fn lewowicz(c: f64, y: &TorusPoint) -> TorusPoint {
    let k = c / (2.0 * PI) * (2.0 * PI * y.u).sin();
    TorusPoint::from_lift([2.0 * y.u - k + y.v, y.u - k + y.v])
}

/// Closed-form inverse: `x = X − Y`, `y = Y − x + k sin 2πx`.
pub fn lewowicz_inverse(c: f64, p: &TorusPoint) -> TorusPoint {
    let x = TorusPoint::from_lift([p.u - p.v, 0.0]).u;
    let k = c / (2.0 * PI) * (2.0 * PI * x).sin();
    TorusPoint::from_lift([x, p.v - x + k])
}

pub fn lewowicz_jacobian(c: f64, y: &TorusPoint) -> Mat2 {
    let cc = c * (2.0 * PI * y.u).cos();
    [[2.0 - cc, 1.0], [1.0 - cc, 1.0]]
}

/// A single fiber diffeomorphism used by the `Constant` family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "map", rename_all = "snake_case")]
pub enum FiberMap {
    Identity,
    Lewowicz { c: f64 },
    Translation { v: [f64; 2] },
}

impl FiberMap {
    pub fn apply(&self, y: &TorusPoint) -> TorusPoint {
        match self {
            FiberMap::Identity => *y,
            FiberMap::Lewowicz { c } => lewowicz(*c, y),
            FiberMap::Translation { v } => y.shifted(*v),
        }
    }

    pub fn apply_inverse(&self, y: &TorusPoint) -> TorusPoint {
        match self {
            FiberMap::Identity => *y,
            FiberMap::Lewowicz { c } => lewowicz_inverse(*c, y),
            FiberMap::Translation { v } => y.shifted([-v[0], -v[1]]),
        }
    }

    pub fn jacobian(&self, y: &TorusPoint) -> Mat2 {
        match self {
            FiberMap::Identity | FiberMap::Translation { .. } => IDENTITY,
            FiberMap::Lewowicz { c } => lewowicz_jacobian(*c, y),
        }
    }
}

/// `amplitude · ψ(dist(x, center))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalarBump {
    pub center: TorusPoint,
    pub profile: BumpProfile,
    pub amplitude: f64,
}

/// `amplitude · ψ(dist(x, center))` with a vector amplitude.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VectorBump {
    pub center: TorusPoint,
    pub profile: BumpProfile,
    pub amplitude: [f64; 2],
}

/// Lewowicz parameter field `c(x) = base + Σ bumps`, valued in `[0, 5)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterField {
    pub base: f64,
    pub bumps: Vec<ScalarBump>,
}

impl ParameterField {
    pub fn new(base: f64, bumps: Vec<ScalarBump>) -> Result<ParameterField> {
        let lo = base + bumps.iter().map(|b| b.amplitude.min(0.0)).sum::<f64>();
        let hi = base + bumps.iter().map(|b| b.amplitude.max(0.0)).sum::<f64>();
        if !(lo >= 0.0 && hi < 5.0) {
            return Err(Error::InvalidInput(format!(
                "Lewowicz parameter field range [{lo}, {hi}] leaves [0, 5)"
            )));
        }
        Ok(ParameterField { base, bumps })
    }

    pub fn eval(&self, x: &TorusPoint) -> f64 {
        self.base
            + self
                .bumps
                .iter()
                .map(|b| b.amplitude * b.profile.value(torus_dist(x, &b.center)))
                .sum::<f64>()
    }

    pub fn lipschitz(&self) -> f64 {
        self.bumps
            .iter()
            .map(|b| b.amplitude.abs() * b.profile.max_slope())
            .sum()
    }
}

/// Translation field `τ(x) = constant + Σ bumps`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranslationField {
    pub constant: [f64; 2],
    pub bumps: Vec<VectorBump>,
}

impl TranslationField {
    pub fn constant(v: [f64; 2]) -> TranslationField {
        TranslationField {
            constant: v,
            bumps: Vec::new(),
        }
    }

    pub fn eval(&self, x: &TorusPoint) -> [f64; 2] {
        let mut t = self.constant;
        for b in &self.bumps {
            let s = b.profile.value(torus_dist(x, &b.center));
            t[0] += s * b.amplitude[0];
            t[1] += s * b.amplitude[1];
        }
        t
    }

    pub fn lipschitz(&self) -> f64 {
        self.bumps
            .iter()
            .map(|b| b.amplitude[0].hypot(b.amplitude[1]) * b.profile.max_slope())
            .sum()
    }
}

/// The fiber maps `g_x` of a skew product.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FiberMapFamily {
    /// `g_x = g` for every base point.
    Constant { map: FiberMap },
    /// `g_x(y) = y + τ(x)`.
    Rotation { field: TranslationField },
    /// `g_x = f_{c(x)}`.
    LewowiczField { field: ParameterField },
    /// `g_x = inner_x ∘ h_x` with bump translations `h` of disjoint base support.
    Perturbed {
        inner: Box<FiberMapFamily>,
        bumps: Vec<BumpTranslation>,
    },
}

impl FiberMapFamily {
    pub fn identity() -> FiberMapFamily {
        FiberMapFamily::Constant {
            map: FiberMap::Identity,
        }
    }

    pub fn constant(map: FiberMap) -> FiberMapFamily {
        FiberMapFamily::Constant { map }
    }

    pub fn rotation(field: TranslationField) -> FiberMapFamily {
        FiberMapFamily::Rotation { field }
    }

    pub fn lewowicz_field(field: ParameterField) -> FiberMapFamily {
        FiberMapFamily::LewowiczField { field }
    }

    pub fn apply(&self, x: &TorusPoint, y: &TorusPoint) -> Result<TorusPoint> {
        Ok(match self {
            FiberMapFamily::Constant { map } => map.apply(y),
            FiberMapFamily::Rotation { field } => y.shifted(field.eval(x)),
            FiberMapFamily::LewowiczField { field } => lewowicz(field.eval(x), y),
            FiberMapFamily::Perturbed { inner, bumps } => {
                let mut p = *y;
                for b in bumps {
                    p = b.apply(x, &p)?;
                }
                inner.apply(x, &p)?
            }
        })
    }

    pub fn apply_inverse(&self, x: &TorusPoint, y: &TorusPoint) -> Result<TorusPoint> {
        Ok(match self {
            FiberMapFamily::Constant { map } => map.apply_inverse(y),
            FiberMapFamily::Rotation { field } => {
                let t = field.eval(x);
                y.shifted([-t[0], -t[1]])
            }
            FiberMapFamily::LewowiczField { field } => lewowicz_inverse(field.eval(x), y),
            FiberMapFamily::Perturbed { inner, bumps } => {
                let mut p = inner.apply_inverse(x, y)?;
                for b in bumps.iter().rev() {
                    p = b.apply_inverse(x, &p)?;
                }
                p
            }
        })
    }

    /// Derivative of `g_x` at `y` in fiber coordinates.
    pub fn jacobian(&self, x: &TorusPoint, y: &TorusPoint) -> Result<Mat2> {
        Ok(match self {
            FiberMapFamily::Constant { map } => map.jacobian(y),
            FiberMapFamily::Rotation { .. } => IDENTITY,
            FiberMapFamily::LewowiczField { field } => lewowicz_jacobian(field.eval(x), y),
            FiberMapFamily::Perturbed { inner, bumps } => {
                let mut p = *y;
                let mut jac = IDENTITY;
                for b in bumps {
                    let (q, jb) = b.apply_with_jacobian(x, &p)?;
                    jac = mat_mul(&jb, &jac);
                    p = q;
                }
                mat_mul(&inner.jacobian(x, &p)?, &jac)
            }
        })
    }

    /// Upper bound on `sup_y |g_x(y) − g_{x'}(y)| / dist(x, x')`.
    pub fn base_lipschitz(&self) -> f64 {
        match self {
            FiberMapFamily::Constant { .. } => 0.0,
            FiberMapFamily::Rotation { field } => field.lipschitz(),
            FiberMapFamily::LewowiczField { field } => {
                // |∂f_c/∂c| ≤ √2/2π
                field.lipschitz() * std::f64::consts::SQRT_2 / (2.0 * PI)
            }
            FiberMapFamily::Perturbed { inner, bumps } => {
                let amplification = inner.fiber_norm_bound();
                inner.base_lipschitz()
                    + amplification * bumps.iter().map(|b| b.base_lipschitz()).sum::<f64>()
            }
        }
    }

    /// Crude upper bound on `sup ‖Dg_x‖`, used only inside Lipschitz bounds.
    fn fiber_norm_bound(&self) -> f64 {
        match self {
            FiberMapFamily::Constant {
                map: FiberMap::Lewowicz { c },
            } => 3.0 + 2.0 * c.abs(),
            FiberMapFamily::Constant { .. } | FiberMapFamily::Rotation { .. } => 1.0,
            FiberMapFamily::LewowiczField { field } => {
                let cmax = field.base + field.bumps.iter().map(|b| b.amplitude.abs()).sum::<f64>();
                3.0 + 2.0 * cmax
            }
            FiberMapFamily::Perturbed { inner, .. } => inner.fiber_norm_bound(),
        }
    }
}

/// `F(x, y) = (A x mod 1, g_x(y))` on `T² × T²`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkewProduct {
    pub base: LinearAnosov,
    pub family: FiberMapFamily,
}

/// Hard cap on `|n|` for [`SkewProduct::cocycle`].
pub const MAX_COCYCLE_STEPS: i64 = 1_000_000;

impl SkewProduct {
    pub fn new(base: LinearAnosov, family: FiberMapFamily) -> SkewProduct {
        SkewProduct { base, family }
    }

    pub fn fiber_map(&self, x: &TorusPoint, y: &TorusPoint) -> Result<TorusPoint> {
        self.family.apply(x, y)
    }

    pub fn fiber_inverse(&self, x: &TorusPoint, y: &TorusPoint) -> Result<TorusPoint> {
        self.family.apply_inverse(x, y)
    }

    pub fn fiber_jacobian(&self, x: &TorusPoint, y: &TorusPoint) -> Result<Mat2> {
        self.family.jacobian(x, y)
    }

    pub fn step(&self, x: &TorusPoint, y: &TorusPoint) -> Result<(TorusPoint, TorusPoint)> {
        Ok((self.base.apply(x), self.fiber_map(x, y)?))
    }

    /// Fiber component of `F^n(x, y)`; negative `n` runs the inverse.
    pub fn cocycle(&self, x: &TorusPoint, n: i64, y: &TorusPoint) -> Result<TorusPoint> {
        if n.abs() > MAX_COCYCLE_STEPS {
            return Err(Error::IterationBudget(n));
        }
        let (mut bx, mut fy) = (*x, *y);
        if n >= 0 {
            for _ in 0..n {
                fy = self.fiber_map(&bx, &fy)?;
                bx = self.base.apply(&bx);
            }
        } else {
            for _ in 0..(-n) {
                bx = self.base.apply_inverse(&bx);
                fy = self.fiber_inverse(&bx, &fy)?;
            }
        }
        Ok(fy)
    }
}

/// Grid estimates of the fiber derivative bounds against the base rates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PHEstimates {
    pub lambda_s: f64,
    pub lambda_u: f64,
    pub l_plus: f64,
    pub l_minus: f64,
    pub dominated: bool,
    pub bunched: bool,
    pub grid_n: usize,
}

impl PHEstimates {
    fn from_bounds(lambda_s: f64, lambda_u: f64, l_plus: f64, l_minus: f64, grid_n: usize) -> Self {
        let ratio = l_plus / l_minus;
        PHEstimates {
            lambda_s,
            lambda_u,
            l_plus,
            l_minus,
            dominated: lambda_s < l_minus && l_plus < lambda_u,
            bunched: lambda_s * ratio < 1.0 && ratio / lambda_u < 1.0,
            grid_n,
        }
    }
}

/// Samples `‖Dg_x(y)‖` and its co-norm over a `grid_n^4` lattice of base × fiber.
pub fn certify_partial_hyperbolicity(sp: &SkewProduct, grid_n: usize) -> Result<PHEstimates> {
    if grid_n < 16 {
        return Err(Error::InvalidInput(format!("grid_n must be >= 16, got {grid_n}")));
    }
    let n = grid_n;
    let h = 1.0 / n as f64;
    let (l_plus, l_minus) = (0..n * n)
        .into_par_iter()
        .map(|k| -> Result<(f64, f64)> {
            let x = TorusPoint {
                u: (k % n) as f64 * h,
                v: (k / n) as f64 * h,
            };
            let mut hi = 0.0f64;
            let mut lo = f64::INFINITY;
            for j in 0..n {
                for i in 0..n {
                    let y = TorusPoint {
                        u: i as f64 * h,
                        v: j as f64 * h,
                    };
                    let (s1, s2) = singular_values(&sp.fiber_jacobian(&x, &y)?);
                    hi = hi.max(s1);
                    lo = lo.min(s2);
                }
            }
            Ok((hi, lo))
        })
        .try_reduce(
            || (0.0, f64::INFINITY),
            |a, b| Ok((a.0.max(b.0), a.1.min(b.1))),
        )?;
    Ok(PHEstimates::from_bounds(
        sp.base.contraction(),
        sp.base.expansion(),
        l_plus,
        l_minus,
        grid_n,
    ))
}
