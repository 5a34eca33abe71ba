//! The gauge that makes every fine tagged family a good Riemann sum.
//!
//! Points of the discontinuity set `A` are grouped by the size of `‖f‖`
//! there; each group is wrapped in a thin open tube of small measure and gets
//! half its distance to the tube boundary. Every other point gets its
//! Lebesgue radius at a budget that decays with the spatial shell it lies in.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::analysis::{lebesgue_radius, CoverFamily};
use crate::corpus::{value_bins, CorpusFunction};
use crate::error::{Error, Result};
use crate::geometry::{norm, Gauge, GaugeProvenance, NormKind, Point, Region};
use crate::measure::{annulus_measure, measure_box, RadonMeasure};

#[derive(Clone, Debug)]
pub struct GaugeBuildParams {
    pub eps: f64,
    pub family: CoverFamily,
    /// Fraction of each tube budget actually spent.
    pub tube_safety: f64,
}

impl GaugeBuildParams {
    pub fn new(eps: f64, family: CoverFamily) -> GaugeBuildParams {
        GaugeBuildParams {
            eps,
            family,
            tube_safety: 0.5,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return Err(Error::Config(format!("eps must be positive, got {}", self.eps)));
        }
        if !(self.tube_safety > 0.0 && self.tube_safety < 1.0) {
            return Err(Error::Config(format!("tube safety {} outside (0, 1)", self.tube_safety)));
        }
        if self.family.lambda < 1.0 {
            return Err(Error::Config(format!("lambda {} below 1", self.family.lambda)));
        }
        Ok(())
    }
}

/// Open box union around the part of `A` where `n − 1 ≤ ‖f‖ < n`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NullTube {
    pub n: u32,
    /// Each box is open; stored by its closure.
    pub boxes: Vec<Region>,
    pub half_width: f64,
    /// Sum of the box measures (an upper bound for the union).
    pub measure: f64,
    /// `eps / (n · 2^(n+2))`.
    pub budget: f64,
}

impl NullTube {
    pub fn contains(&self, x: &Point) -> bool {
        self.boxes.iter().any(|b| strictly_inside(b, x))
    }

    /// Largest `s` such that some box of the tube contains `B(x, s)`.
    pub fn inner_distance(&self, x: &Point) -> f64 {
        self.boxes.iter().map(|b| b.inner_distance(x)).fold(0.0, f64::max)
    }
}

fn strictly_inside(b: &Region, x: &Point) -> bool {
    (0..b.dim()).all(|k| b.lo.get(k) < x.get(k) && x.get(k) < b.hi.get(k))
}

/// The unique `n ≥ 1` with `n − 1 ≤ |x| < n`.
pub fn shell_index(x: &Point, domain_norm: NormKind) -> u32 {
    norm(x, domain_norm).floor() as u32 + 1
}

/// `ε_n = eps · 2^(−n−2) / (1 + μ(E_n))`, `E_n = B(0, n+1) ∖ B(0, n−2)`.
pub fn shell_budget(eps: f64, n: u32, mu: &RadonMeasure, domain_norm: NormKind) -> Result<f64> {
    let e_n = annulus_measure(mu, n, domain_norm)?;
    Ok(eps * f64::powi(2.0, -(n as i32) - 2) / (1.0 + e_n))
}

/// `eps / (n · 2^(n+2))`.
pub fn tube_budget(eps: f64, n: u32) -> f64 {
    eps / (n as f64 * f64::powi(2.0, n as i32 + 2))
}

/// One tube per `‖f‖`-bin of the declared discontinuity set, with a common
/// half-width chosen so the tube measure stays below `safety · budget`.
pub fn build_null_tubes(f: &dyn CorpusFunction, eps: f64, mu: &RadonMeasure, safety: f64) -> Result<Vec<NullTube>> {
    let mut bins: std::collections::BTreeMap<u32, Vec<Region>> = Default::default();
    for d in f.discontinuities() {
        if !d.region.is_degenerate() {
            return Err(Error::TubeInfeasible(format!(
                "{}: discontinuity piece {:?} has positive volume",
                f.name(),
                d.region
            )));
        }
        for n in value_bins(d.value_norms.0, d.value_norms.1) {
            bins.entry(n).or_default().push(d.region);
        }
    }
    let u = *mu.universe();
    let mut tubes = Vec::new();
    for (n, pieces) in bins {
        let budget = tube_budget(eps, n);
        let target = safety * budget;
        let mass = |w: f64| -> Result<f64> {
            let mut total = 0.0;
            for p in &pieces {
                if let Some(c) = p.grown(w).intersect(&u) {
                    total += measure_box(mu, &c)?.value;
                }
            }
            Ok(total)
        };
        let mut hi = 1.0;
        while mass(hi)? >= target {
            hi *= 0.5;
            if hi < 1e-300 {
                return Err(Error::TubeInfeasible(format!("{}: bin {n} cannot be made small", f.name())));
            }
        }
        // hi is feasible; push toward the largest feasible width
        let mut lo = hi;
        let mut up = (2.0 * hi).min(1.0);
        if up > lo && mass(up)? >= target {
            for _ in 0..50 {
                let mid = 0.5 * (lo + up);
                if mass(mid)? < target {
                    lo = mid;
                } else {
                    up = mid;
                }
            }
        }
        let boxes: Vec<Region> = pieces.iter().map(|p| p.grown(lo)).collect();
        tubes.push(NullTube {
            n,
            boxes,
            half_width: lo,
            measure: mass(lo)?,
            budget,
        });
    }
    Ok(tubes)
}

/// How `δ(x)` was determined.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "branch", rename_all = "snake_case")]
pub enum Branch {
    /// `x ∈ A_n`: half the distance to the boundary of tube `n`.
    Null { n: u32, inner: f64 },
    /// `x` a Lebesgue point in spatial shell `n` with budget `ε_n`.
    Lebesgue { n: u32, budget: f64, radius: f64 },
}

/// The gauge together with everything needed to audit it.
#[derive(Debug)]
pub struct TheoremGauge {
    pub f: Arc<dyn CorpusFunction>,
    pub mu: Arc<RadonMeasure>,
    pub params: GaugeBuildParams,
    pub tubes: Vec<NullTube>,
    /// `ε_n` for `n = 1..=shell_budgets.len()`.
    pub shell_budgets: Vec<f64>,
}

impl TheoremGauge {
    pub fn build(f: Arc<dyn CorpusFunction>, mu: Arc<RadonMeasure>, params: GaugeBuildParams) -> Result<TheoremGauge> {
        params.validate()?;
        if f.dim_in() != mu.dim() {
            return Err(Error::DimensionMismatch {
                expected: f.dim_in(),
                found: mu.dim(),
            });
        }
        let norm_kind = params.family.domain_norm;
        let origin = Point::origin(mu.dim());
        let far = mu.universe().farthest_distance(&origin, norm_kind);
        let shells = far.floor() as u32 + 1;
        let shell_budgets = (1..=shells)
            .map(|n| shell_budget(params.eps, n, &mu, norm_kind))
            .collect::<Result<Vec<_>>>()?;
        let tubes = build_null_tubes(f.as_ref(), params.eps, &mu, params.tube_safety)?;
        Ok(TheoremGauge {
            f,
            mu,
            params,
            tubes,
            shell_budgets,
        })
    }

    pub fn domain_norm(&self) -> NormKind {
        self.params.family.domain_norm
    }

    pub fn budget_for(&self, n: u32) -> Result<f64> {
        match self.shell_budgets.get(n as usize - 1) {
            Some(b) => Ok(*b),
            None => shell_budget(self.params.eps, n, &self.mu, self.domain_norm()),
        }
    }

    /// Largest circumradius keeping the family set at `x` inside the universe.
    fn universe_cap(&self, x: &Point) -> f64 {
        let inner = self.mu.universe().inner_distance(x);
        let unit = self.params.family.set_at(x, 1.0).bounding_box();
        let reach = (0..x.dim())
            .map(|k| (unit.hi.get(k) - x.get(k)).max(x.get(k) - unit.lo.get(k)))
            .fold(0.0, f64::max);
        inner / reach
    }

    pub fn branch(&self, x: &Point) -> Result<Branch> {
        let f = self.f.as_ref();
        let norm_kind = self.domain_norm();
        if f.discontinuity_distance(x, norm_kind) == 0.0 {
            let v = f.eval(x).norm();
            let n = v.floor() as u32 + 1;
            let tube = self
                .tubes
                .iter()
                .find(|t| t.n == n && t.contains(x))
                .ok_or_else(|| Error::TubeInfeasible(format!("no tube of bin {n} contains {x:?}")))?;
            return Ok(Branch::Null {
                n,
                inner: tube.inner_distance(x),
            });
        }
        let n = shell_index(x, norm_kind);
        let budget = self.budget_for(n)?;
        let r = lebesgue_radius(f, x, budget, &self.mu, &self.params.family)?;
        Ok(Branch::Lebesgue {
            n,
            budget,
            radius: r.radius,
        })
    }

    pub fn delta(&self, x: &Point) -> Result<f64> {
        match self.branch(x)? {
            Branch::Null { inner, .. } => Ok(0.5 * inner.min(1.0)),
            Branch::Lebesgue { radius, .. } => {
                let cap = self.universe_cap(x);
                let d = radius.min(1.0);
                Ok(if cap > 0.0 { d.min(cap) } else { d })
            }
        }
    }

    pub fn provenance(&self) -> GaugeProvenance {
        GaugeProvenance {
            kind: "theorem".into(),
            eps: Some(self.params.eps),
            gamma: None,
            shell_budgets: self
                .shell_budgets
                .iter()
                .enumerate()
                .map(|(i, b)| (i as u32 + 1, *b))
                .collect(),
            tubes: self.tubes.clone(),
            notes: vec![
                format!("tube safety {}", self.params.tube_safety),
                "discontinuity points take half their distance to the tube boundary".into(),
                "Lebesgue points are capped so the family set stays inside the universe".into(),
            ],
        }
    }

    pub fn into_gauge(self: Arc<Self>) -> Gauge {
        let provenance = self.provenance();
        Gauge::from_fn(move |x| self.delta(x), provenance)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{lookup, CorpusOptions};

    fn p(c: &[f64]) -> Point {
        Point::new(c)
    }

    #[test]
    fn shell_index_examples() {
        assert_eq!(shell_index(&p(&[0.0]), NormKind::Two), 1);
        assert_eq!(shell_index(&p(&[1.0]), NormKind::Two), 2);
        assert_eq!(shell_index(&p(&[-2.7]), NormKind::Two), 3);
    }

    #[test]
    fn shell_budget_examples() {
        let mu = RadonMeasure::lebesgue(Region::cube(1, -4.0, 4.0));
        assert!((shell_budget(0.1, 1, &mu, NormKind::Two).unwrap() - 0.0025).abs() < 1e-15);
        let b3 = shell_budget(0.1, 3, &mu, NormKind::Two).unwrap();
        assert!((b3 - 0.1 / 32.0 / 7.0).abs() < 1e-15);
    }

    #[test]
    fn step2_point_tube() {
        let f = lookup("step2", &CorpusOptions::default()).unwrap();
        let mu = RadonMeasure::lebesgue(*f.universe());
        let tubes = build_null_tubes(f.as_ref(), 0.1, &mu, 0.5).unwrap();
        assert_eq!(tubes.len(), 1);
        assert_eq!(tubes[0].n, 2);
        let m = tubes[0].measure;
        assert!(m < 0.5 * 0.1 / (2.0 * 16.0));
        assert!(m > 0.99 * 0.5 * 0.1 / (2.0 * 16.0));
        assert!((2.0 * tubes[0].half_width - m).abs() < 1e-15);
    }

    #[test]
    fn constant_gauge_is_one() {
        let f = lookup("constant", &CorpusOptions::default()).unwrap();
        let mu = Arc::new(RadonMeasure::lebesgue(*f.universe()));
        let fam = CoverFamily::cubes(2, NormKind::Inf);
        let g = TheoremGauge::build(f, mu, GaugeBuildParams::new(0.1, fam)).unwrap();
        assert!(g.tubes.is_empty());
        // the universe cap binds near the edge, the unit cap at the centre
        assert_eq!(g.delta(&p(&[0.5, 0.5])).unwrap(), 0.5);
        let g = Arc::new(g).into_gauge();
        assert_eq!(g.eval(&p(&[0.25, 0.5])).unwrap(), 0.25);
    }

    #[test]
    fn step2_jump_takes_half_tube() {
        let f = lookup("step2", &CorpusOptions::default()).unwrap();
        let mu = Arc::new(RadonMeasure::lebesgue(*f.universe()));
        let fam = CoverFamily::cubes(1, NormKind::Inf);
        let g = TheoremGauge::build(f, mu, GaugeBuildParams::new(0.1, fam)).unwrap();
        let w = g.tubes[0].half_width;
        assert!((g.delta(&p(&[0.5])).unwrap() - w / 2.0).abs() < 1e-15);
    }
}
