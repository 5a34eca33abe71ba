//! Lusin compact sets, approximate-continuity radii and Lebesgue-point radii.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::corpus::{CorpusFunction, Regularity, VectorValue};
use crate::error::{Error, Result};
use crate::geometry::{norm_ratio, MorseSet, NormKind, Point, Region, Shape};
use crate::integrate::{set_abs_deviation, set_exceed, set_measure};
use crate::measure::{measure_box, RadonMeasure};

/// Smallest dyadic radius probed by the quadrature searches.
pub const RADIUS_FLOOR_LOG2: u32 = 20;

/// Which tagged sets the radius statements quantify over.
#[derive(Clone, Debug, Serialize)]
pub struct CoverFamily {
    pub template: FamilyTemplate,
    pub domain_norm: NormKind,
    pub lambda: f64,
}

#[derive(Clone, Debug, Serialize)]
pub enum FamilyTemplate {
    /// Cubes centred at the tag.
    Cube,
    /// Balls of the domain norm.
    Ball,
    /// A star polygon tagged at the origin, rescaled per query.
    Star2D(MorseSet),
}

impl CoverFamily {
    pub fn cubes(dim: usize, domain_norm: NormKind) -> CoverFamily {
        let lambda = norm_ratio(domain_norm, NormKind::Inf, dim) / norm_ratio(NormKind::Inf, domain_norm, dim);
        CoverFamily {
            template: FamilyTemplate::Cube,
            domain_norm,
            lambda,
        }
    }

    pub fn balls(domain_norm: NormKind) -> CoverFamily {
        CoverFamily {
            template: FamilyTemplate::Ball,
            domain_norm,
            lambda: 1.0,
        }
    }

    pub fn star(template: MorseSet) -> CoverFamily {
        let origin = Point::origin(template.dim());
        let template = template.translated(origin);
        CoverFamily {
            domain_norm: template.domain_norm,
            lambda: template.lambda,
            template: FamilyTemplate::Star2D(template),
        }
    }

    /// The family member tagged at `x` whose circumradius is exactly `r`.
    pub fn set_at(&self, x: &Point, r: f64) -> MorseSet {
        let d = x.dim();
        match &self.template {
            FamilyTemplate::Cube => {
                MorseSet::cube_unchecked(*x, r / norm_ratio(self.domain_norm, NormKind::Inf, d), self.domain_norm)
            }
            FamilyTemplate::Ball => MorseSet {
                tag: *x,
                shape: Shape::Ball {
                    radius: r,
                    norm: self.domain_norm,
                },
                lambda: 1.0,
                domain_norm: self.domain_norm,
            },
            FamilyTemplate::Star2D(t) => {
                let k = r / t.circumradius(self.domain_norm);
                let Shape::Star2D {
                    inner_radius,
                    vertices,
                } = &t.shape
                else {
                    unreachable!("star template")
                };
                MorseSet {
                    tag: *x,
                    shape: Shape::Star2D {
                        inner_radius: inner_radius * k,
                        vertices: vertices.iter().map(|v| v.scale(k).add(x)).collect::<Vec<_>>().into(),
                    },
                    lambda: t.lambda,
                    domain_norm: self.domain_norm,
                }
            }
        }
    }

    /// Members at `r, r/2, …, r/2^(levels−1)`.
    pub fn sweep(&self, x: &Point, r: f64, levels: u32) -> Vec<MorseSet> {
        (0..levels).map(|j| self.set_at(x, r / f64::powi(2.0, j as i32))).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RadiusRoute {
    /// Constant on the ball: deviation vanishes.
    Discontinuity,
    /// Taylor bound on a one-dimensional smooth piece.
    Smooth,
    Lipschitz,
    /// Dyadic probing with certified integrals; only a sampled statement.
    Search,
}

impl RadiusRoute {
    pub fn name(self) -> &'static str {
        match self {
            RadiusRoute::Discontinuity => "discontinuity",
            RadiusRoute::Smooth => "smooth",
            RadiusRoute::Lipschitz => "lipschitz",
            RadiusRoute::Search => "search",
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct RadiusResult {
    pub radius: f64,
    pub certified: bool,
    pub budget: f64,
    pub route: RadiusRoute,
}

/// Symmetric intervals under a density that is constant around `x`: mean
/// deviation bounds are available instead of sup bounds.
fn centered_uniform(mu: &RadonMeasure, family: &CoverFamily, x: &Point, r: f64) -> bool {
    if x.dim() != 1 || family.lambda != 1.0 {
        return false;
    }
    let iv = Region::cube(1, x.get(0) - r, x.get(0) + r);
    mu.universe().contains_region(&iv) && mu.uniform_on(&iv).is_some()
}

/// Largest `r ∈ (0, cap]` with `bound(r) ≤ target`, for `bound` non-decreasing.
fn largest_radius(cap: f64, target: f64, bound: impl Fn(f64) -> Option<f64>) -> Option<f64> {
    if bound(cap).is_some_and(|b| b <= target) {
        return Some(cap);
    }
    let (mut lo, mut hi) = (0.0, cap);
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if bound(mid).is_some_and(|b| b <= target) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (lo > 0.0).then_some(lo)
}

fn cap_for(f: &dyn CorpusFunction, x: &Point, norm: NormKind) -> (f64, f64) {
    let dist = f.discontinuity_distance(x, norm);
    (dist, dist.min(1.0))
}

/// Largest `r ≥ 0` with `a·r + c·r² ≤ t`.
fn quadratic_root(a: f64, c: f64, t: f64) -> f64 {
    if c <= 0.0 {
        if a > 0.0 {
            t / a
        } else {
            f64::INFINITY
        }
    } else {
        2.0 * t / (a + (a * a + 4.0 * c * t).sqrt())
    }
}

/// Closed-form radius for a `Smooth1d` point. The curvature bound only grows
/// with the radius, so freezing it at a trial radius `r₁` and solving the
/// quadratic gives a certified radius below `r₁`.
fn smooth_radius(
    f: &dyn CorpusFunction,
    x: &Point,
    eps: f64,
    cap: f64,
    norm: NormKind,
    centred: impl Fn(f64) -> bool,
) -> Option<f64> {
    let Some(Regularity::Smooth1d { slope, curvature }) = f.regularity(x, 0.0, norm) else {
        return None;
    };
    // mean bound on centred intervals first, sup bound otherwise
    for (ka, kc, needs_centre) in [(0.5, 1.0 / 6.0, true), (1.0, 0.5, false)] {
        let first = quadratic_root(ka * slope, kc * curvature, eps);
        let trial = first.min(0.5 * cap);
        if !(trial > 0.0) {
            return None;
        }
        let (s1, c1) = match f.regularity(x, trial, norm)? {
            Regularity::Smooth1d { slope, curvature } => (slope, curvature),
            Regularity::Constant => (0.0, 0.0),
            Regularity::Lipschitz(l) => (l, 0.0),
        };
        let r = quadratic_root(ka * s1, kc * c1, eps).min(trial);
        if !needs_centre || centred(r) {
            return (r > 0.0).then_some(r);
        }
    }
    None
}

/// Dyadic search: the largest `2^-k` radius from which every probed radius
/// down to the floor satisfies `ok`.
fn dyadic_search(start: f64, mut ok: impl FnMut(f64) -> Result<bool>) -> Result<Option<f64>> {
    let mut best = None;
    for k in (0..=RADIUS_FLOOR_LOG2).rev() {
        let r = start * f64::powi(0.5, k as i32);
        if ok(r)? {
            best = Some(r);
        } else {
            break;
        }
    }
    Ok(best)
}

/// Radius `R` such that every family set at `x` inside `B(x, R)` satisfies
/// `∫_S ‖f − f(x)‖ dμ ≤ eps · μ(S)`.
pub fn lebesgue_radius(
    f: &dyn CorpusFunction,
    x: &Point,
    eps: f64,
    mu: &RadonMeasure,
    family: &CoverFamily,
) -> Result<RadiusResult> {
    let norm = family.domain_norm;
    let (dist, cap) = cap_for(f, x, norm);
    let done = |radius: f64, route| RadiusResult {
        radius: radius.min(1.0),
        certified: true,
        budget: eps,
        route,
    };
    if dist > 0.0 {
        match f.regularity(x, 0.0, norm) {
            Some(Regularity::Constant) => return Ok(done(cap, RadiusRoute::Discontinuity)),
            Some(Regularity::Lipschitz(l)) => {
                let r = if l > 0.0 { eps / (2.0 * l * family.lambda) } else { cap };
                return Ok(done(r.min(cap), RadiusRoute::Lipschitz));
            }
            Some(Regularity::Smooth1d { .. }) => {
                let bound = |r: f64| match f.regularity(x, r, norm)? {
                    Regularity::Smooth1d { slope, curvature } => Some(if centered_uniform(mu, family, x, r) {
                        slope * r / 2.0 + curvature * r * r / 6.0
                    } else {
                        slope * r + curvature * r * r / 2.0
                    }),
                    Regularity::Constant => Some(0.0),
                    Regularity::Lipschitz(l) => Some(l * r),
                };
                let r = match smooth_radius(f, x, eps, cap, norm, |r| centered_uniform(mu, family, x, r)) {
                    Some(r) => r,
                    None => largest_radius(cap, eps, bound).ok_or(Error::NotLebesgue { at: *x })?,
                };
                return Ok(done(r.min(cap), RadiusRoute::Smooth));
            }
            None => {}
        }
    }
    let fx = f.eval(x);
    let start = f.universe().diameter(norm).min(1.0);
    let found = dyadic_search(start, |r| {
        let s = family.set_at(x, r);
        let m = set_measure(mu, &s, 1e-9 * r)?;
        if m.lower() <= 0.0 {
            return Ok(true);
        }
        let dev = set_abs_deviation(f, mu, &s, &fx, 1e-3 * eps * m.value)?;
        Ok(dev.upper() <= eps * m.lower())
    })?;
    match found {
        Some(r) => Ok(RadiusResult {
            radius: r,
            certified: false,
            budget: eps,
            route: RadiusRoute::Search,
        }),
        None => Err(Error::NotLebesgue { at: *x }),
    }
}

/// Radius `R` such that every family set at `x` inside `B(x, R)` satisfies
/// `μ{‖f − f(x)‖ > eta} ≤ eps · μ(S)`.
pub fn approx_continuity_radius(
    f: &dyn CorpusFunction,
    x: &Point,
    eps: f64,
    eta: f64,
    mu: &RadonMeasure,
    family: &CoverFamily,
) -> Result<RadiusResult> {
    let norm = family.domain_norm;
    let (dist, cap) = cap_for(f, x, norm);
    let done = |radius: f64, route| RadiusResult {
        radius: radius.min(1.0),
        certified: true,
        budget: eps,
        route,
    };
    if dist > 0.0 {
        match f.regularity(x, 0.0, norm) {
            Some(Regularity::Constant) => return Ok(done(cap, RadiusRoute::Discontinuity)),
            Some(Regularity::Lipschitz(l)) => {
                let r = if l > 0.0 { eta / (l * family.lambda) } else { cap };
                return Ok(done(r.min(cap), RadiusRoute::Lipschitz));
            }
            Some(Regularity::Smooth1d { .. }) => {
                let bound = |r: f64| match f.regularity(x, r, norm)? {
                    Regularity::Smooth1d { slope, curvature } => Some(slope * r + curvature * r * r / 2.0),
                    Regularity::Constant => Some(0.0),
                    Regularity::Lipschitz(l) => Some(l * r),
                };
                let r = largest_radius(cap, eta, bound).ok_or(Error::NotApproxContinuous { at: *x })?;
                return Ok(done(r, RadiusRoute::Smooth));
            }
            None => {}
        }
    }
    let fx = f.eval(x);
    let start = f.universe().diameter(norm).min(1.0);
    let found = dyadic_search(start, |r| {
        let s = family.set_at(x, r);
        let m = set_measure(mu, &s, 1e-9 * r)?;
        if m.lower() <= 0.0 {
            return Ok(true);
        }
        let bad = set_exceed(f, mu, &s, &fx, eta, 1e-3 * eps * m.value)?;
        Ok(bad.upper() <= eps * m.lower())
    })?;
    match found {
        Some(r) => Ok(RadiusResult {
            radius: r,
            certified: false,
            budget: eps,
            route: RadiusRoute::Search,
        }),
        None => Err(Error::NotApproxContinuous { at: *x }),
    }
}

/// Outcome of checking the mean-deviation bound `≤ 4ε·μ(S)` derived from
/// approximate continuity plus a Lebesgue point of `‖f‖`.
#[derive(Clone, Debug, Serialize)]
pub struct DeviationCheck {
    pub tag: Point,
    pub eps: f64,
    pub radius: f64,
    pub sets_checked: usize,
    /// Largest `∫_S ‖f − f(x)‖ dμ / μ(S)` over the sweep.
    pub max_ratio: f64,
    pub passed: bool,
}

pub fn verify_prop43(
    f: &dyn CorpusFunction,
    x: &Point,
    eps: f64,
    mu: &RadonMeasure,
    family: &CoverFamily,
) -> Result<DeviationCheck> {
    let fx = f.eval(x);
    let c = fx.norm();
    let uncertified = |what: &str, e: Error| Error::PreconditionUncertified(format!("{what} at {x:?}: {e}"));
    let ac = approx_continuity_radius(f, x, eps / (2.0 * c + 1.0), eps, mu, family)
        .map_err(|e| uncertified("approximate continuity", e))?;
    // |‖f(y)‖ − ‖f(x)‖| ≤ ‖f(y) − f(x)‖, so radii for f bound those for ‖f‖
    let norm_radius = if f.norm_is_constant() {
        1.0
    } else {
        lebesgue_radius(f, x, eps, mu, family)
            .map_err(|e| uncertified("Lebesgue point of the norm", e))?
            .radius
    };
    if !ac.certified {
        return Err(Error::PreconditionUncertified(format!(
            "approximate continuity at {x:?} only sampled"
        )));
    }
    let radius = ac.radius.min(norm_radius);
    let mut max_ratio: f64 = 0.0;
    let mut checked = 0;
    for s in family.sweep(x, radius, 8) {
        let m = set_measure(mu, &s, 1e-9 * radius)?;
        if m.lower() <= 0.0 {
            continue;
        }
        let dev = set_abs_deviation(f, mu, &s, &fx, 1e-3 * eps * m.value)?;
        max_ratio = max_ratio.max(dev.upper() / m.lower());
        checked += 1;
    }
    Ok(DeviationCheck {
        tag: *x,
        eps,
        radius,
        sets_checked: checked,
        max_ratio,
        passed: max_ratio <= 4.0 * eps,
    })
}

/// One closed box of a Lusin compact set.
#[derive(Clone, Debug, Serialize)]
pub struct LusinPiece {
    pub region: Region,
    pub value: Option<VectorValue>,
}

#[derive(Clone, Debug, Serialize)]
pub struct CompactContinuitySet {
    pub pieces: Vec<LusinPiece>,
    /// Minimum distance between pieces that may carry different values.
    pub separation: f64,
    pub omitted_measure: f64,
    pub margin: f64,
    pub eps: f64,
}

/// Shrink every continuity piece away from faces interior to `omega`.
pub fn lusin_compact_set(
    f: &dyn CorpusFunction,
    omega: &Region,
    eps: f64,
    mu: &RadonMeasure,
) -> Result<CompactContinuitySet> {
    let pieces: Vec<_> = f
        .continuity_pieces()
        .ok_or_else(|| Error::NotPiecewise(f.name().to_string()))?
        .into_iter()
        .filter_map(|p| {
            p.region
                .intersect(omega)
                .filter(|r| !r.is_degenerate())
                .map(|region| LusinPiece { region, value: p.value })
        })
        .collect();
    let d = omega.dim();
    // faces of a piece that lie strictly inside omega, with their (d−1)-volume
    let interior_faces = |r: &Region| -> Vec<(usize, bool, f64)> {
        let mut out = Vec::new();
        for k in 0..d {
            let area: f64 = (0..d).filter(|&j| j != k).map(|j| r.extent(j)).product();
            if r.lo.get(k) > omega.lo.get(k) {
                out.push((k, false, area));
            }
            if r.hi.get(k) < omega.hi.get(k) {
                out.push((k, true, area));
            }
        }
        out
    };
    let boundary: f64 = pieces
        .iter()
        .flat_map(|p| interior_faces(&p.region))
        .map(|(_, _, a)| a)
        .sum();
    let min_extent = pieces
        .iter()
        .flat_map(|p| (0..d).map(move |k| p.region.extent(k)))
        .fold(f64::INFINITY, f64::min);
    let w = mu.max_density().max(f64::MIN_POSITIVE);
    let margin = if boundary > 0.0 {
        ((eps / 2.0) / (w * boundary)).min(min_extent / 4.0)
    } else {
        0.0
    };
    let shrunk: Vec<LusinPiece> = pieces
        .iter()
        .map(|p| {
            let mut r = p.region;
            for (k, upper, _) in interior_faces(&p.region) {
                if upper {
                    r.hi.set(k, r.hi.get(k) - margin);
                } else {
                    r.lo.set(k, r.lo.get(k) + margin);
                }
            }
            LusinPiece {
                region: r,
                value: p.value,
            }
        })
        .collect();
    let kept: f64 = shrunk
        .iter()
        .map(|p| measure_box(mu, &p.region).map(|m| m.value))
        .sum::<Result<f64>>()?;
    let omitted = (measure_box(mu, omega)?.value - kept).max(0.0);
    let mut separation = omega.diameter(NormKind::Two);
    for (i, a) in shrunk.iter().enumerate() {
        for b in &shrunk[i + 1..] {
            let same = matches!((&a.value, &b.value), (Some(x), Some(y)) if x == y);
            if !same {
                separation = separation.min(box_distance(&a.region, &b.region));
            }
        }
    }
    Ok(CompactContinuitySet {
        pieces: shrunk,
        separation,
        omitted_measure: omitted,
        margin,
        eps,
    })
}

/// Euclidean distance between two boxes.
pub fn box_distance(a: &Region, b: &Region) -> f64 {
    (0..a.dim())
        .map(|k| {
            let gap = (a.lo.get(k) - b.hi.get(k)).max(b.lo.get(k) - a.hi.get(k)).max(0.0);
            gap * gap
        })
        .sum::<f64>()
        .sqrt()
}

#[derive(Clone, Debug, Serialize)]
pub struct ModulusCheck {
    pub pairs: usize,
    pub violations: usize,
    /// Largest `‖f(p) − f(q)‖ − L·‖p − q‖` seen.
    pub worst_excess: f64,
}

/// Sample pairs of points of `K` closer than its separation and check
/// `‖f(p) − f(q)‖ ≤ L·‖p − q‖` with the Lipschitz bound on their hull.
pub fn lusin_modulus_check(f: &dyn CorpusFunction, k: &CompactContinuitySet, pairs: usize, seed: u64) -> ModulusCheck {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut violations = 0;
    let mut worst = f64::NEG_INFINITY;
    let mut done = 0;
    let in_k = |q: &Point| k.pieces.iter().any(|p| p.region.contains(q));
    let mut attempts = 0;
    while done < pairs && attempts < 100 * pairs {
        attempts += 1;
        let piece = &k.pieces[rng.gen_range(0..k.pieces.len())];
        let p = piece.region.sample(&mut rng);
        let mut offset = Point::origin(p.dim());
        for j in 0..p.dim() {
            offset.set(j, rng.gen_range(-1.0..1.0));
        }
        let len = offset.distance(&Point::origin(p.dim()), NormKind::Two);
        if len == 0.0 {
            continue;
        }
        let reach = rng.gen_range(0.0..1.0) * k.separation.min(1.0);
        let q = p.add(&offset.scale(reach / len));
        if !in_k(&q) || p.distance(&q, NormKind::Two) >= k.separation {
            continue;
        }
        let hull = Region {
            lo: p.map2(&q, f64::min),
            hi: p.map2(&q, f64::max),
        };
        let jump = f.eval(&p).sub(&f.eval(&q)).norm();
        let excess = match f.lipschitz_on(&hull, NormKind::Two) {
            Some(l) => jump - l * p.distance(&q, NormKind::Two),
            None => f64::INFINITY,
        };
        worst = worst.max(excess);
        if excess > 1e-12 * (1.0 + jump) {
            violations += 1;
        }
        done += 1;
    }
    ModulusCheck {
        pairs: done,
        violations,
        worst_excess: worst,
    }
}

/// Certified Lebesgue radius at each point of a uniform `n^d` probe grid
/// (cell centres of the universe).
pub fn lebesgue_map(
    f: &dyn CorpusFunction,
    mu: &RadonMeasure,
    eps: f64,
    family: &CoverFamily,
    n: usize,
) -> Vec<(Point, Result<RadiusResult>)> {
    let u = *f.universe();
    let d = u.dim();
    let total = n.pow(d as u32);
    (0..total)
        .into_par_iter()
        .map(|i| {
            let mut p = u.lo;
            let mut rem = i;
            for k in (0..d).rev() {
                let j = rem % n;
                rem /= n;
                p.set(k, u.lo.get(k) + (j as f64 + 0.5) * u.extent(k) / n as f64);
            }
            let r = lebesgue_radius(f, &p, eps, mu, family);
            (p, r)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{lookup, CorpusOptions};

    fn setup(name: &str) -> (std::sync::Arc<dyn CorpusFunction>, RadonMeasure) {
        let f = lookup(name, &CorpusOptions::default()).unwrap();
        let mu = RadonMeasure::lebesgue(*f.universe());
        (f, mu)
    }

    #[test]
    fn step2_radii() {
        let (f, mu) = setup("step2");
        let fam = CoverFamily::cubes(1, NormKind::Two);
        let x = Point::new(&[0.3]);
        let r = lebesgue_radius(f.as_ref(), &x, 0.01, &mu, &fam).unwrap();
        assert!((r.radius - 0.2).abs() < 1e-15 && r.certified);
        let a = approx_continuity_radius(f.as_ref(), &x, 0.1, 0.5, &mu, &fam).unwrap();
        assert!((a.radius - 0.2).abs() < 1e-15);
        let jump = Point::new(&[0.5]);
        assert!(matches!(
            approx_continuity_radius(f.as_ref(), &jump, 0.1, 0.5, &mu, &fam),
            Err(Error::NotApproxContinuous { .. })
        ));
        assert!(matches!(
            lebesgue_radius(f.as_ref(), &jump, 0.1, &mu, &fam),
            Err(Error::NotLebesgue { .. })
        ));
    }

    #[test]
    fn linear1_closed_form() {
        let (f, mu) = setup("linear1");
        let fam = CoverFamily::cubes(1, NormKind::Two);
        let r = lebesgue_radius(f.as_ref(), &Point::new(&[0.5]), 0.01, &mu, &fam).unwrap();
        assert_eq!(r.radius, 0.02);
        // mean |y − x| over [x − h, x + h] is h/2
        let s = fam.set_at(&Point::new(&[0.5]), r.radius);
        let dev = set_abs_deviation(f.as_ref(), &mu, &s, &f.eval(&Point::new(&[0.5])), 0.0).unwrap();
        assert!((dev.value / (2.0 * r.radius) - 0.01).abs() < 1e-15);
    }

    #[test]
    fn lipschitz_radius_formulas() {
        let (f, mu) = setup("lipschitz2d");
        let fam = CoverFamily::cubes(2, NormKind::Two);
        let l = 1.0 / 16.0;
        let x = Point::new(&[0.5, 0.5]);
        let r = lebesgue_radius(f.as_ref(), &x, 0.001, &mu, &fam).unwrap();
        assert!((r.radius - 0.001 / (2.0 * l * fam.lambda)).abs() < 1e-15);
        let a = approx_continuity_radius(f.as_ref(), &x, 0.3, 0.001, &mu, &fam).unwrap();
        assert!((a.radius - 0.001 / (l * fam.lambda)).abs() < 1e-15);
    }

    #[test]
    fn checker_cell_center() {
        let (f, mu) = setup("checker2d");
        let fam = CoverFamily::cubes(2, NormKind::Inf);
        let x = Point::new(&[0.375, 0.625]);
        let r = lebesgue_radius(f.as_ref(), &x, 0.01, &mu, &fam).unwrap();
        assert!((r.radius - 0.125).abs() < 1e-15);
        let s = fam.set_at(&x, r.radius);
        let dev = set_abs_deviation(f.as_ref(), &mu, &s, &f.eval(&x), 0.0).unwrap();
        assert_eq!(dev.value, 0.0);
    }

    #[test]
    fn spike_radius_shrinks_toward_singularity() {
        let (f, mu) = setup("spike1");
        let fam = CoverFamily::cubes(1, NormKind::Two);
        let mut last = f64::INFINITY;
        for x in [0.5, 0.1, 0.01, 0.001] {
            let r = lebesgue_radius(f.as_ref(), &Point::new(&[x]), 0.01, &mu, &fam).unwrap();
            assert!(r.radius < x && r.radius < last);
            last = r.radius;
            let s = fam.set_at(&Point::new(&[x]), r.radius);
            let dev = set_abs_deviation(f.as_ref(), &mu, &s, &f.eval(&Point::new(&[x])), 0.0).unwrap();
            assert!(dev.value <= 0.01 * 2.0 * r.radius * (1.0 + 1e-12));
        }
        assert!(lebesgue_radius(f.as_ref(), &Point::new(&[0.0]), 0.01, &mu, &fam).is_err());
    }

    #[test]
    fn lusin_examples() {
        let (f, mu) = setup("step2");
        let k = lusin_compact_set(f.as_ref(), f.universe(), 0.1, &mu).unwrap();
        assert!((k.margin - 0.025).abs() < 1e-15);
        assert!((k.pieces[0].region.hi.get(0) - 0.475).abs() < 1e-15);
        assert!((k.pieces[1].region.lo.get(0) - 0.525).abs() < 1e-15);
        assert!((k.omitted_measure - 0.05).abs() < 1e-12);
        let (c, mu) = setup("constant");
        let k = lusin_compact_set(c.as_ref(), c.universe(), 0.1, &mu).unwrap();
        assert_eq!(k.omitted_measure, 0.0);
        assert_eq!(k.pieces.len(), 1);
    }

    #[test]
    fn prop43_on_sign() {
        let (f, mu) = setup("sign1");
        let fam = CoverFamily::cubes(1, NormKind::Two);
        let r = verify_prop43(f.as_ref(), &Point::new(&[0.1]), 0.05, &mu, &fam).unwrap();
        assert!(r.passed && r.sets_checked > 0);
    }
}
