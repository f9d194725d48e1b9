//! One function per subcommand. Each returns a [`Report`]; nothing here
//! touches the filesystem.

use std::sync::Arc;

use anyhow::{bail, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use skewlab::accessibility::{
    classify_class, explore_with, loop_generators, trivial_set_scan_with, ClassKind, FiberTransform, LoopMap,
};
use skewlab::anosov::{build_quad, build_quads, leaf, HeteroclinicQuad, Leg};
use skewlab::ergodic::ergodic_scan_in;
use skewlab::fiber::{certify_partial_hyperbolicity, FiberMap, FiberMapFamily, ParameterField, SkewProduct};
use skewlab::holonomy::holonomy;
use skewlab::monotone::{pbb_search, pbb_verify, random_monotone};
use skewlab::perturbation::destroy_trivial_class;
use skewlab::torus::{torus_dist, FiberRect, TorusPoint};

use crate::config::{ExperimentConfig, SweepParameter};

pub struct Table {
    pub name: &'static str,
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

pub struct Report {
    pub summary: Value,
    pub tables: Vec<Table>,
    /// A scientific postcondition that did not hold; outputs are still written.
    pub failure: Option<String>,
}

fn f(x: f64) -> String {
    x.to_string()
}

fn refs(gens: &[LoopMap]) -> Vec<&dyn FiberTransform> {
    gens.iter().map(|g| g as &dyn FiberTransform).collect()
}

fn quad_summary(q: &HeteroclinicQuad) -> Value {
    json!({ "x": q.x, "p": q.p, "periods": q.periods, "w": q.w, "z": q.z })
}

pub fn certify(cfg: &ExperimentConfig) -> Result<Report> {
    let sp = cfg.skew_product()?;
    let est = certify_partial_hyperbolicity(&sp, cfg.certify.grid_n)?;
    let row = vec![
        f(est.lambda_s),
        f(est.lambda_u),
        f(est.l_plus),
        f(est.l_minus),
        est.dominated.to_string(),
        est.bunched.to_string(),
        est.grid_n.to_string(),
    ];
    Ok(Report {
        failure: (!est.dominated).then(|| "partial hyperbolicity (domination) not certified".to_string()),
        summary: json!({ "estimates": est }),
        tables: vec![Table {
            name: "certify",
            header: vec!["lambda_s", "lambda_u", "l_plus", "l_minus", "dominated", "bunched", "grid_n"],
            rows: vec![row],
        }],
    })
}

pub fn holonomy_scenario(cfg: &ExperimentConfig) -> Result<Report> {
    let h = &cfg.holonomy;
    let sp = Arc::new(cfg.skew_product()?);
    let a = &sp.base;
    let y = leaf(a, h.x, h.kind, h.offset.abs() + 0.01)?.point_at(h.offset);
    let map = holonomy(&sp, &Leg { kind: h.kind, from: h.x, to: y }, cfg.tol)?;
    let mapped = holonomy(&sp, &Leg { kind: h.kind, from: a.apply(&h.x), to: a.apply(&y) }, cfg.tol)?;
    let mut rows = Vec::new();
    let mut worst: f64 = 0.0;
    for v in FiberRect::unit().grid(h.grid_n).into_iter().map(TorusPoint::from_lift) {
        let hv = map.apply(&v)?;
        let lhs = mapped.apply(&sp.fiber_map(&h.x, &v)?)?;
        let rhs = sp.fiber_map(&y, &hv)?;
        let err = torus_dist(&lhs, &rhs);
        worst = worst.max(err);
        rows.push(vec![f(v.u), f(v.v), f(hv.u), f(hv.v), f(err)]);
    }
    let failure = (worst > h.equivariance_tol)
        .then(|| format!("equivariance error {worst:e} exceeds {:e}", h.equivariance_tol));
    Ok(Report {
        summary: json!({
            "target": y,
            "truncation_n": map.truncation_n,
            "certified_tol": map.certified_tol,
            "cauchy_ratio": map.cauchy_ratio(),
            "increments": map.increments,
            "max_equivariance_error": worst,
            "equivariance_tol": h.equivariance_tol,
            "grid_n": h.grid_n,
        }),
        tables: vec![Table {
            name: "holonomy",
            header: vec!["v_u", "v_v", "h_u", "h_v", "equivariance_error"],
            rows,
        }],
        failure,
    })
}

struct ClassCounts {
    counts: [usize; 4],
    rows: Vec<Vec<String>>,
}

fn run_classes(sp: &Arc<SkewProduct>, quads: &[HeteroclinicQuad], cfg: &ExperimentConfig, seeds: usize) -> Result<ClassCounts> {
    let gens = loop_generators(sp, quads, cfg.tol)?;
    let gens = refs(&gens);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut counts = [0; 4];
    let mut rows = Vec::new();
    for _ in 0..seeds {
        let seed = TorusPoint { u: rng.gen(), v: rng.gen() };
        let s = explore_with(&gens, seed, cfg.classify.k, cfg.classify.word_length)?;
        let kind = classify_class(&s);
        counts[kind as usize] += 1;
        let d = &s.diagnostics;
        rows.push(vec![
            f(seed.u),
            f(seed.v),
            kind.name().to_string(),
            f(d.diameter),
            d.box_dimension_estimate.map(f).unwrap_or_default(),
            s.points.len().to_string(),
            d.scales_used.iter().map(|j| j.to_string()).collect::<Vec<_>>().join(" "),
        ]);
    }
    Ok(ClassCounts { counts, rows })
}

const CLASS_KINDS: [ClassKind; 4] = [ClassKind::Trivial, ClassKind::Curve, ClassKind::Open, ClassKind::Indeterminate];

fn counts_json(c: &[usize; 4]) -> Value {
    let mut m = serde_json::Map::new();
    for k in CLASS_KINDS {
        m.insert(k.name().to_string(), json!(c[k as usize]));
    }
    Value::Object(m)
}

fn quads_for(cfg: &ExperimentConfig, sp: &SkewProduct, count: usize) -> Result<Vec<HeteroclinicQuad>> {
    let q = &cfg.quad;
    Ok(build_quads(&sp.base, q.x, q.radius, q.max_den, q.n_check, count)?)
}

pub fn classify(cfg: &ExperimentConfig) -> Result<Report> {
    let sp = Arc::new(cfg.skew_product()?);
    let quads = quads_for(cfg, &sp, cfg.quad.count)?;
    let c = run_classes(&sp, &quads, cfg, cfg.classify.seeds)?;
    Ok(Report {
        summary: json!({
            "counts": counts_json(&c.counts),
            "quads": quads.iter().map(quad_summary).collect::<Vec<_>>(),
            "k": cfg.classify.k,
            "word_length": cfg.classify.word_length,
            "tol": cfg.tol,
        }),
        tables: vec![Table {
            name: "classify",
            header: vec!["seed_u", "seed_v", "verdict", "diameter", "dim_estimate", "n_points", "scales_used"],
            rows: c.rows,
        }],
        failure: None,
    })
}

struct Destroyed {
    sp: SkewProduct,
    v_x: skewlab::torus::FiberRegion,
    summary: Value,
    table: Table,
    failure: Option<String>,
}

fn run_destroy(cfg: &ExperimentConfig) -> Result<Destroyed> {
    let sp = cfg.skew_product()?;
    let q = &cfg.quad;
    let quad = build_quad(&sp.base, q.x, q.radius, q.max_den, q.n_check)?;
    let mut settings = cfg.destroy.settings.clone();
    settings.seed = cfg.seed;
    let out = destroy_trivial_class(&sp, &quad, cfg.destroy.epsilon, &settings)?;
    let n = cfg.destroy.rescan_factor * settings.scan_grid_n;
    let scan = |s: &SkewProduct| {
        let s = Arc::new(s.clone());
        let gens = loop_generators(&s, std::slice::from_ref(&quad), settings.tol)?;
        trivial_set_scan_with(&refs(&gens), out.v_x.grid(n), settings.tol)
    };
    let rescan = scan(&out.sp)?;
    let control = scan(&sp)?;
    let rows = rescan
        .grid
        .iter()
        .zip(&rescan.max_displacement)
        .map(|(y, d)| vec![f(y.u), f(y.v), f(*d), (*d < settings.tol).to_string()])
        .collect();
    let ph = certify_partial_hyperbolicity(&out.sp, cfg.certify.grid_n)?;
    let min_rescan = rescan.max_displacement.iter().copied().fold(f64::INFINITY, f64::min);
    let failure = (!rescan.fixed.is_empty()).then(|| format!("{} points of V_x remain trivial", rescan.fixed.len()));
    Ok(Destroyed {
        summary: json!({
            "quad": quad_summary(&quad),
            "epsilon": cfg.destroy.epsilon,
            "bumps": out.bumps,
            "v_x": out.v_x,
            "draws": out.draws,
            "residual_fixed": out.residual_fixed,
            "library_scan": { "grid_n": settings.scan_grid_n, "fixed": out.scan.fixed.len(), "min_displacement": out.min_displacement },
            "rescan": { "grid_n": n, "points": rescan.grid.len(), "fixed": rescan.fixed.len(), "min_displacement": min_rescan },
            "control_trivial_fraction": control.fixed_fraction(),
            "perturbed_estimates": ph,
            "tol": settings.tol,
        }),
        sp: out.sp,
        v_x: out.v_x,
        table: Table { name: "destroy_scan", header: vec!["u", "v", "max_displacement", "fixed"], rows },
        failure,
    })
}

pub fn destroy(cfg: &ExperimentConfig) -> Result<Report> {
    let d = run_destroy(cfg)?;
    Ok(Report { summary: d.summary, tables: vec![d.table], failure: d.failure })
}

pub fn ergodic(cfg: &ExperimentConfig) -> Result<Report> {
    let e = &cfg.ergodic;
    let (sp, region, destroyed) = if e.destroy_first {
        let d = run_destroy(cfg)?;
        if let Some(msg) = d.failure {
            bail!(skewlab::Error::PostconditionFailure(msg));
        }
        (d.sp, e.region.or(Some(d.v_x)), Some(d.summary))
    } else {
        (cfg.skew_product()?, e.region, None)
    };
    let r = ergodic_scan_in(&sp, &e.observable, e.n, e.ics, cfg.seed, region.as_ref())?;
    let averages = r.averages.iter().enumerate().map(|(i, a)| vec![i.to_string(), f(*a)]).collect();
    let deviation = r.deviation.iter().map(|(n, s)| vec![n.to_string(), f(*s)]).collect();
    Ok(Report {
        summary: json!({ "report": r, "region": region, "destroy": destroyed }),
        tables: vec![
            Table { name: "ergodic_averages", header: vec!["ic", "average"], rows: averages },
            Table { name: "ergodic_deviation", header: vec!["n", "sigma"], rows: deviation },
        ],
        failure: None,
    })
}

pub fn pbb(cfg: &ExperimentConfig) -> Result<Report> {
    let p = &cfg.pbb;
    let eps = cfg.pbb_epsilon()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (lo, hi) = (skewlab::monotone::q(-1, 1), skewlab::monotone::q(1, 1));
    let mut rows = Vec::new();
    let (mut exhausted, mut unverified) = (0, 0);
    for i in 0..p.instances {
        let n = [0; 3].map(|_| rng.gen_range(1..=p.max_pieces));
        let l1 = random_monotone(&mut rng, n[0], p.max_jumps);
        let l2 = random_monotone(&mut rng, n[1], p.max_jumps);
        let phi = random_monotone(&mut rng, n[2], p.max_jumps).rescaled_into(&lo, &hi);
        let mut row = vec![i.to_string(), n[0].to_string(), n[1].to_string(), n[2].to_string()];
        match pbb_search(&l1, &l2, &phi, &eps, p.grid_n) {
            Ok(c) => {
                let ok = pbb_verify(&l1, &l2, &phi, &c.s, &c.t);
                unverified += usize::from(!ok);
                let status = if ok { "certified" } else { "unverified" };
                row.extend([c.s.to_string(), c.t.to_string(), c.checks.to_string(), c.levels.to_string(), status.into()]);
            }
            Err(skewlab::Error::SearchExhausted(checks)) => {
                exhausted += 1;
                row.extend([String::new(), String::new(), checks.to_string(), String::new(), "exhausted".into()]);
            }
            Err(e) => return Err(e.into()),
        }
        rows.push(row);
    }
    let failure = (exhausted + unverified > 0)
        .then(|| format!("{exhausted} searches exhausted, {unverified} certificates failed re-verification"));
    Ok(Report {
        summary: json!({
            "instances": p.instances,
            "certified": p.instances - exhausted - unverified,
            "exhausted": exhausted,
            "unverified": unverified,
            "epsilon": eps.to_string(),
            "grid_n": p.grid_n,
        }),
        tables: vec![Table {
            name: "pbb",
            header: vec!["instance", "pieces_l1", "pieces_l2", "pieces_phi", "s", "t", "checks", "levels", "status"],
            rows,
        }],
        failure,
    })
}

fn scale_family(fam: &FiberMapFamily, k: f64) -> Result<FiberMapFamily> {
    Ok(match fam {
        FiberMapFamily::Rotation { field } => {
            let mut field = field.clone();
            for b in &mut field.bumps {
                b.amplitude = [k * b.amplitude[0], k * b.amplitude[1]];
            }
            FiberMapFamily::rotation(field)
        }
        FiberMapFamily::LewowiczField { field } => {
            let mut bumps = field.bumps.clone();
            for b in &mut bumps {
                b.amplitude *= k;
            }
            FiberMapFamily::lewowicz_field(ParameterField::new(field.base, bumps)?)
        }
        FiberMapFamily::Perturbed { inner, bumps } => {
            let mut bumps = bumps.clone();
            for b in &mut bumps {
                b.v = [k * b.v[0], k * b.v[1]];
            }
            FiberMapFamily::Perturbed { inner: Box::new(scale_family(inner, k)?), bumps }
        }
        FiberMapFamily::Constant { .. } => bail!(skewlab::Error::InvalidInput(
            "sweep parameter bump_scale needs a family with bumps".into()
        )),
    })
}

pub fn sweep(cfg: &ExperimentConfig) -> Result<Report> {
    let s = &cfg.sweep;
    let quads = quads_for(cfg, &cfg.skew_product()?, cfg.quad.count)?;
    let mut rows = Vec::new();
    let mut points = Vec::new();
    for &value in &s.values {
        let family = match s.parameter {
            SweepParameter::LewowiczC => FiberMapFamily::constant(FiberMap::Lewowicz { c: value }),
            SweepParameter::BumpScale => scale_family(&cfg.family, value)?,
        };
        let sp = Arc::new(cfg.skew_product_with(family)?);
        let est = certify_partial_hyperbolicity(&sp, cfg.certify.grid_n)?;
        // classes are only meaningful where the holonomies exist
        let (counts, note) = match run_classes(&sp, &quads, cfg, s.seeds) {
            Ok(c) => (Some(c.counts), String::new()),
            Err(e) => (None, e.to_string()),
        };
        let cell = |k: ClassKind| counts.map(|c| c[k as usize].to_string()).unwrap_or_default();
        let mut row = vec![f(value), est.dominated.to_string(), f(est.l_plus), f(est.l_minus)];
        row.extend(CLASS_KINDS.map(cell));
        row.push(note.clone());
        rows.push(row);
        points.push(json!({
            "value": value,
            "estimates": est,
            "counts": counts.as_ref().map(counts_json),
            "error": (!note.is_empty()).then_some(note),
        }));
    }
    Ok(Report {
        summary: json!({ "parameter": s.parameter, "seeds_per_value": s.seeds, "points": points }),
        tables: vec![Table {
            name: "sweep",
            header: vec!["value", "dominated", "l_plus", "l_minus", "trivial", "curve", "open", "indeterminate", "error"],
            rows,
        }],
        failure: None,
    })
}
