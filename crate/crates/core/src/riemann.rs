//! Riemann sums over tagged families and the bounds they must satisfy.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::analysis::{CoverFamily, FamilyTemplate};
use crate::corpus::{CorpusFunction, VectorValue};
use crate::error::{Error, Result};
use crate::gauge::{Branch, GaugeBuildParams, TheoremGauge};
use crate::geometry::{Gauge, MorseSet, Point, Region};
use crate::integrate::{ac_modulus_weighted, box_abs_integral, box_integral, set_abs_deviation, set_integral, set_measure};
use crate::measure::{measure_box, RadonMeasure};
use crate::partition::{
    audit_family, dyadic_sieve_trial, inflate_one_cell, move_tags_to_corners, vitali_ball_pack, FamilyAudit, FamilyCell,
    Sabotage, SieveParams, TaggedFamily,
};

/// Relative slack on inequalities that hold exactly in real arithmetic.
pub const CHAIN_TOL: f64 = 1e-9;

/// Per-cell quantities, computed independently for each cell.
#[derive(Clone, Debug)]
struct CellTerms {
    measure: f64,
    value: VectorValue,
    integral: VectorValue,
    integral_err: f64,
    deviation: f64,
    deviation_err: f64,
    branch: Option<Branch>,
}

fn cell_terms(
    f: &dyn CorpusFunction,
    mu: &RadonMeasure,
    c: &FamilyCell,
    tol: f64,
    gauge: Option<&TheoremGauge>,
) -> Result<CellTerms> {
    let measure = set_measure(mu, &c.set, 1e-3 * tol)?.value;
    let value = f.eval(&c.tag);
    let (integral, integral_err) = set_integral(f, mu, &c.set, tol)?;
    let dev = set_abs_deviation(f, mu, &c.set, &value, tol)?;
    let branch = match gauge {
        Some(g) => Some(g.branch(&c.tag)?),
        None => None,
    };
    Ok(CellTerms {
        measure,
        value,
        integral,
        integral_err,
        deviation: dev.value,
        deviation_err: dev.error_bound,
        branch,
    })
}

fn all_cell_terms(
    f: &dyn CorpusFunction,
    mu: &RadonMeasure,
    fam: &TaggedFamily,
    tol: f64,
    gauge: Option<&TheoremGauge>,
) -> Result<Vec<CellTerms>> {
    fam.cells.par_iter().map(|c| cell_terms(f, mu, c, tol, gauge)).collect()
}

fn zero(f: &dyn CorpusFunction) -> VectorValue {
    VectorValue::zeros(f.dim_out(), f.y_norm())
}

/// `Σ_i f(x_i) μ(S_i)` in canonical order.
pub fn simple_sum(fam: &TaggedFamily, f: &dyn CorpusFunction, mu: &RadonMeasure) -> Result<VectorValue> {
    let terms: Vec<VectorValue> = fam
        .cells
        .par_iter()
        .map(|c| Ok(f.eval(&c.tag).scale(set_measure(mu, &c.set, 1e-15)?.value)))
        .collect::<Result<_>>()?;
    let mut acc = zero(f);
    for t in &terms {
        acc.add_assign(t);
    }
    Ok(acc)
}

/// `Σ_i ‖∫_{S_i} f dμ − f(x_i) μ(S_i)‖`.
pub fn local_error_sum(fam: &TaggedFamily, f: &dyn CorpusFunction, mu: &RadonMeasure) -> Result<f64> {
    let terms: Vec<f64> = fam
        .cells
        .par_iter()
        .map(|c| {
            let m = set_measure(mu, &c.set, 1e-15)?.value;
            let (i, _) = set_integral(f, mu, &c.set, 1e-12)?;
            Ok(i.sub(&f.eval(&c.tag).scale(m)).norm())
        })
        .collect::<Result<_>>()?;
    Ok(terms.iter().sum())
}

/// `∫_{Ω ∖ ∪S_i} ‖f‖ dμ`, upper bound.
fn residual_abs(f: &dyn CorpusFunction, mu: &RadonMeasure, fam: &TaggedFamily, tol: f64) -> Result<f64> {
    match &fam.residual_cells {
        Some(cells) => cells
            .par_iter()
            .map(|r| box_abs_integral(f, mu, r).map(|m| m.upper()))
            .collect::<Result<Vec<f64>>>()
            // an empty float sum is -0.0
            .map(|v| v.iter().sum::<f64>() + 0.0),
        None => {
            let total = box_abs_integral(f, mu, &fam.omega)?.upper();
            let z = zero(f);
            let covered: f64 = fam
                .cells
                .par_iter()
                .map(|c| set_abs_deviation(f, mu, &c.set, &z, tol).map(|m| m.lower()))
                .collect::<Result<Vec<f64>>>()?
                .iter()
                .sum();
            Ok((total - covered).max(0.0))
        }
    }
}

/// Upper bound on `∫_X ‖f − Σ_i f(x_i) χ_{S_i}‖ dμ`: the covered part, the
/// uncovered part of `Ω`, and the modelled tail outside `Ω`.
pub fn l1_deviation(fam: &TaggedFamily, f: &dyn CorpusFunction, mu: &RadonMeasure, tol: f64) -> Result<f64> {
    let terms = all_cell_terms(f, mu, fam, tol, None)?;
    let covered: f64 = terms.iter().map(|t| t.deviation + t.deviation_err).sum();
    Ok(covered + residual_abs(f, mu, fam, tol)? + f.tail_abs())
}

/// The value at `y` of the simple function `Σ_i f(x_i) χ_{S_i}`.
pub fn simple_function_at(fam: &TaggedFamily, f: &dyn CorpusFunction, y: &Point) -> VectorValue {
    fam.cells
        .iter()
        .find(|c| c.set.contains(y))
        .map(|c| f.eval(&c.tag))
        .unwrap_or_else(|| zero(f))
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct PassFlags {
    /// Covered-region deviation `< eps`.
    pub l1: bool,
    pub local: bool,
    pub truncation: bool,
    pub chain: bool,
    pub family: bool,
    /// Discontinuity-tag mass `≤ eps/4`.
    pub null_mass: bool,
    /// Every Lebesgue-tagged cell within its shell budget.
    pub lebesgue_cells: bool,
}

impl PassFlags {
    pub fn all(&self) -> bool {
        self.l1 && self.local && self.truncation && self.chain && self.family && self.null_mass && self.lebesgue_cells
    }

    fn failures(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        for (ok, name) in [
            (self.l1, "l1 deviation"),
            (self.local, "local error sum"),
            (self.truncation, "truncation"),
            (self.chain, "chain inequality"),
            (self.family, "family audit"),
            (self.null_mass, "discontinuity-tag mass"),
            (self.lebesgue_cells, "Lebesgue cell budget"),
        ] {
            if !ok {
                out.push(name);
            }
        }
        out
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ApproximationReport {
    pub function: String,
    pub trial: u32,
    pub eps: f64,
    pub eta: f64,
    pub gamma: f64,
    pub sabotage: Option<Sabotage>,
    pub cell_count: usize,
    pub max_depth: u32,
    pub simple_sum: VectorValue,
    /// `∫_Ω f dμ` from the oracle.
    pub exact: VectorValue,
    /// `Σ_i ∫_{S_i} ‖f − f(x_i)‖ dμ`, upper bound.
    pub l1_partition: f64,
    /// `∫_{residual} ‖f‖ dμ`, upper bound.
    pub residual_abs: f64,
    pub tail_abs: f64,
    /// `l1_partition + residual_abs + tail_abs`.
    pub l1_deviation: f64,
    pub local_error_sum: f64,
    /// `max_{n ≥ m} ‖exact − Σ_{i ≤ n}‖ + tail_abs`.
    pub truncation_error: f64,
    pub truncation_index: usize,
    pub residual_measure: f64,
    pub null_tag_mass: f64,
    pub lebesgue_violations: usize,
    pub quadrature_error: f64,
    pub audit: FamilyAudit,
    pub pass_flags: PassFlags,
}

impl ApproximationReport {
    pub fn passed(&self) -> bool {
        self.pass_flags.all()
    }

    /// `residual_abs + tail_abs`: the part of the deviation attributed to the
    /// finite truncation of the family rather than to the gauge.
    pub fn slack(&self) -> f64 {
        self.residual_abs + self.tail_abs
    }
}

#[derive(Clone, Debug)]
pub struct TheoremOptions {
    pub family: CoverFamily,
    pub max_depth: u32,
    pub seed: u64,
    pub eta: Option<f64>,
    pub tube_safety: f64,
    pub sabotage: Option<Sabotage>,
}

impl TheoremOptions {
    pub fn new(f: &dyn CorpusFunction, family: CoverFamily) -> TheoremOptions {
        TheoremOptions {
            family,
            max_depth: f.recommended_max_depth().max(24),
            seed: 0,
            eta: None,
            tube_safety: 0.5,
            sabotage: None,
        }
    }
}

/// Gauge plus sieve parameters shared by all trials of one run.
pub struct Pipeline {
    pub f: Arc<dyn CorpusFunction>,
    pub mu: Arc<RadonMeasure>,
    pub eps: f64,
    pub gamma: f64,
    pub sieve: SieveParams,
    pub theorem_gauge: Arc<TheoremGauge>,
    pub gauge: Gauge,
    pub options: TheoremOptions,
}

impl Pipeline {
    pub fn new(f: Arc<dyn CorpusFunction>, mu: Arc<RadonMeasure>, eps: f64, options: TheoremOptions) -> Result<Pipeline> {
        let mut params = GaugeBuildParams::new(eps, options.family.clone());
        params.tube_safety = options.tube_safety;
        let tg = Arc::new(TheoremGauge::build(f.clone(), mu.clone(), params)?);
        let gamma = ac_modulus_weighted(f.as_ref(), &mu, eps / 4.0);
        let eta = options.eta.unwrap_or_else(|| gamma.min(eps * 1e-2));
        let mut gauge = tg.clone().into_gauge();
        gauge.provenance.gamma = Some(gamma);
        Ok(Pipeline {
            f,
            mu,
            eps,
            gamma,
            sieve: SieveParams {
                eta,
                max_depth: options.max_depth,
            },
            theorem_gauge: tg,
            gauge,
            options,
        })
    }

    pub fn omega(&self) -> Region {
        *self.mu.universe()
    }

    /// The family of trial `t`, before any sabotage.
    pub fn family(&self, trial: u32) -> Result<TaggedFamily> {
        let g = match self.options.sabotage {
            Some(Sabotage::InflateDelta) => self.gauge.inflated(2.0),
            _ => self.gauge.clone(),
        };
        if matches!(self.options.family.template, FamilyTemplate::Ball) {
            return vitali_ball_pack(&self.omega(), &g, &self.mu, &self.sieve, self.options.family.domain_norm);
        }
        dyadic_sieve_trial(
            &self.omega(),
            &g,
            &self.mu,
            &self.sieve,
            self.options.family.domain_norm,
            trial,
            self.options.seed,
        )
    }

    pub fn sabotaged(&self, fam: TaggedFamily) -> TaggedFamily {
        match self.options.sabotage {
            Some(Sabotage::OverlapCells) => inflate_one_cell(&fam),
            Some(Sabotage::OffcenterTags) => move_tags_to_corners(&fam),
            _ => fam,
        }
    }

    /// Evaluate every bound on one family.
    pub fn report(&self, trial: u32, fam: &TaggedFamily) -> Result<ApproximationReport> {
        let f = self.f.as_ref();
        let mu = self.mu.as_ref();
        let eps = self.eps;
        let n = fam.cells.len().max(1);
        let tol = eps / (16.0 * n as f64);
        let audit = audit_family(fam, &self.gauge, mu, self.sieve.eta)?;
        let terms = all_cell_terms(f, mu, fam, tol, Some(&self.theorem_gauge))?;

        let mut simple = zero(f);
        let mut l1_partition = 0.0;
        let mut local = 0.0;
        let mut quad = 0.0;
        let mut null_mass = 0.0;
        let mut lebesgue_violations = 0;
        for t in &terms {
            let riemann = t.value.scale(t.measure);
            simple.add_assign(&riemann);
            l1_partition += t.deviation + t.deviation_err;
            local += t.integral.sub(&riemann).norm();
            quad += t.deviation_err + t.integral_err;
            match t.branch {
                Some(Branch::Null { .. }) => null_mass += t.value.norm() * t.measure,
                Some(Branch::Lebesgue { budget, .. }) => {
                    if t.deviation - t.deviation_err > budget * t.measure * (1.0 + CHAIN_TOL) {
                        lebesgue_violations += 1;
                    }
                }
                None => {}
            }
        }
        let residual_abs = residual_abs(f, mu, fam, tol)?;
        let tail_abs = f.tail_abs();
        let l1 = l1_partition + residual_abs + tail_abs;
        let exact = box_integral(f, mu, &fam.omega)?;

        // truncation: first m whose uncovered measure drops below γ, then the
        // worst partial sum from there on
        let total = measure_box(mu, &fam.omega)?.value;
        let mut covered = 0.0;
        let mut m = terms.len();
        for (i, t) in terms.iter().enumerate() {
            if total - covered < self.gamma {
                m = i;
                break;
            }
            covered += t.measure;
        }
        if m == terms.len() && total - covered >= self.gamma {
            m = terms.len();
        }
        let mut prefix = zero(f);
        for t in &terms[..m] {
            prefix.add_assign(&t.value.scale(t.measure));
        }
        let mut worst = exact.sub(&prefix).norm();
        for t in &terms[m..] {
            prefix.add_assign(&t.value.scale(t.measure));
            worst = worst.max(exact.sub(&prefix).norm());
        }
        let truncation_error = worst + tail_abs;

        let rel = |x: f64| x * (1.0 + CHAIN_TOL) + quad + 1e-15;
        let chain = local <= rel(l1_partition) && l1_partition <= rel(l1) && {
            let slack = residual_abs + tail_abs;
            exact.sub(&simple).norm() - slack <= rel(l1)
        };
        let flags = PassFlags {
            l1: l1_partition < eps,
            local: local < eps,
            truncation: truncation_error < 3.0 * eps,
            chain,
            family: audit.ok(),
            null_mass: null_mass <= eps / 4.0,
            lebesgue_cells: lebesgue_violations == 0,
        };
        Ok(ApproximationReport {
            function: f.name().to_string(),
            trial,
            eps,
            eta: self.sieve.eta,
            gamma: self.gamma,
            sabotage: self.options.sabotage,
            cell_count: fam.cells.len(),
            max_depth: fam.depth_histogram.keys().last().copied().unwrap_or(0),
            simple_sum: simple,
            exact,
            l1_partition,
            residual_abs,
            tail_abs,
            l1_deviation: l1,
            local_error_sum: local,
            truncation_error,
            truncation_index: m,
            residual_measure: fam.residual_measure,
            null_tag_mass: null_mass,
            lebesgue_violations,
            quadrature_error: quad,
            audit,
            pass_flags: flags,
        })
    }

    pub fn run_trial(&self, trial: u32) -> Result<(TaggedFamily, ApproximationReport)> {
        let fam = self.sabotaged(self.family(trial)?);
        let report = self.report(trial, &fam)?;
        Ok((fam, report))
    }
}

/// Build the gauge at `eps`, sieve `trials` families and check every bound.
/// Fails with `BoundViolated` carrying all reports if any trial fails.
pub fn verify_theorem(
    f: Arc<dyn CorpusFunction>,
    mu: Arc<RadonMeasure>,
    eps: f64,
    trials: u32,
    options: TheoremOptions,
) -> Result<Vec<ApproximationReport>> {
    let pipeline = Pipeline::new(f, mu, eps, options)?;
    let mut reports = Vec::new();
    for t in 0..trials.max(1) {
        reports.push(pipeline.run_trial(t)?.1);
    }
    check_reports(reports)
}

fn check_reports(reports: Vec<ApproximationReport>) -> Result<Vec<ApproximationReport>> {
    let failed: Vec<String> = reports
        .iter()
        .filter(|r| !r.passed())
        .map(|r| format!("trial {}: {}", r.trial, r.pass_flags.failures().join(", ")))
        .collect();
    if failed.is_empty() {
        Ok(reports)
    } else {
        Err(Error::BoundViolated {
            reason: failed.join("; "),
            reports,
        })
    }
}

/// `G(E) = ∫_E f dμ` on finite unions of disjoint boxes.
pub struct IntegralSetFunction {
    pub f: Arc<dyn CorpusFunction>,
    pub mu: Arc<RadonMeasure>,
}

impl IntegralSetFunction {
    pub fn new(f: Arc<dyn CorpusFunction>, mu: Arc<RadonMeasure>) -> IntegralSetFunction {
        IntegralSetFunction { f, mu }
    }

    pub fn evaluate(&self, boxes: &[Region]) -> Result<VectorValue> {
        let mut acc = zero(self.f.as_ref());
        for b in boxes {
            acc.add_assign(&box_integral(self.f.as_ref(), &self.mu, b)?);
        }
        Ok(acc)
    }

    pub fn evaluate_set(&self, s: &MorseSet) -> Result<VectorValue> {
        Ok(set_integral(self.f.as_ref(), &self.mu, s, 1e-12)?.0)
    }

    /// `G(Ω)`.
    pub fn total(&self) -> Result<VectorValue> {
        self.evaluate(&[*self.mu.universe()])
    }

    /// `∫_Ω ‖f‖ dμ`, upper bound.
    pub fn abs_total(&self) -> Result<f64> {
        Ok(box_abs_integral(self.f.as_ref(), &self.mu, self.mu.universe())?.upper())
    }
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct CorollaryFlags {
    pub riemann_sum: bool,
    pub m_bound: bool,
    /// Only asserted for entries whose components keep one sign.
    pub witness: Option<bool>,
    pub reconstruction: bool,
    pub family: bool,
}

impl CorollaryFlags {
    pub fn all(&self) -> bool {
        self.riemann_sum && self.m_bound && self.witness.unwrap_or(true) && self.reconstruction && self.family
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CorollaryReport {
    pub function: String,
    pub eps: f64,
    pub cell_count: usize,
    /// `Σ_i ‖f(x_i) μ(S_i) − G(S_i)‖`.
    pub riemann_sum_error: f64,
    /// `Σ_i ‖G(S_i)‖`.
    pub m_witness: f64,
    pub abs_total: f64,
    pub witness_gap: f64,
    /// `‖G(Ω) − Σ_i f(x_i) μ(S_i) − G(residual)‖ + tail_abs`.
    pub reconstruction_error: f64,
    pub total: VectorValue,
    pub simple_sum: VectorValue,
    pub residual_measure: f64,
    pub tail_abs: f64,
    pub flags: CorollaryFlags,
}

/// Check the set-function bounds on the trial-0 family of `pipeline`,
/// without failing on a violated bound.
pub fn corollary_report(pipeline: &Pipeline) -> Result<CorollaryReport> {
    let f = pipeline.f.clone();
    let mu = pipeline.mu.clone();
    let eps = pipeline.eps;
    let fam = pipeline.sabotaged(pipeline.family(0)?);
    let g = IntegralSetFunction::new(f.clone(), mu.clone());
    let audit = audit_family(&fam, &pipeline.gauge, &mu, pipeline.sieve.eta)?;
    let fr = f.as_ref();
    let parts: Vec<(VectorValue, VectorValue)> = fam
        .cells
        .par_iter()
        .map(|c| {
            let gs = g.evaluate_set(&c.set)?;
            let m = set_measure(&mu, &c.set, 1e-15)?.value;
            Ok((gs, fr.eval(&c.tag).scale(m)))
        })
        .collect::<Result<_>>()?;
    let mut riemann = 0.0;
    let mut m_witness = 0.0;
    let mut simple = zero(fr);
    let mut covered_g = zero(fr);
    for (gs, r) in &parts {
        riemann += r.sub(gs).norm();
        m_witness += gs.norm();
        simple.add_assign(r);
        covered_g.add_assign(gs);
    }
    let total = g.total()?;
    let abs_total = g.abs_total()?;
    let residual_g = match &fam.residual_cells {
        Some(cells) => g.evaluate(cells)?,
        None => total.sub(&covered_g),
    };
    let tail = fr.tail_abs();
    let reconstruction = total.sub(&simple).sub(&residual_g).norm() + tail;
    let gap = abs_total - m_witness;
    let flags = CorollaryFlags {
        riemann_sum: riemann < eps,
        m_bound: m_witness <= abs_total + 1e-9,
        witness: fr.sign_constant().then_some(gap < eps / 2.0),
        reconstruction: reconstruction < 2.0 * eps,
        family: audit.ok(),
    };
    Ok(CorollaryReport {
        function: fr.name().to_string(),
        eps,
        cell_count: fam.cells.len(),
        riemann_sum_error: riemann,
        m_witness,
        abs_total,
        witness_gap: gap,
        reconstruction_error: reconstruction,
        total,
        simple_sum: simple,
        residual_measure: fam.residual_measure,
        tail_abs: tail,
        flags,
    })
}

pub fn verify_corollary(
    f: Arc<dyn CorpusFunction>,
    mu: Arc<RadonMeasure>,
    eps: f64,
    options: TheoremOptions,
) -> Result<CorollaryReport> {
    let pipeline = Pipeline::new(f, mu, eps, options)?;
    let report = corollary_report(&pipeline)?;
    if report.flags.all() {
        Ok(report)
    } else {
        Err(Error::BoundViolated {
            reason: format!(
                "corollary bounds failed for {} at eps {eps}: {:?}",
                report.function, report.flags
            ),
            reports: Vec::new(),
        })
    }
}

/// A random exhausting family of centre-tagged dyadic cubes: each cube is
/// split with probability ½ down to `max_depth`.
pub fn random_exhausting_family(omega: &Region, mu: &RadonMeasure, seed: u64, max_depth: u32) -> Result<TaggedFamily> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cells = Vec::new();
    let mut stack = vec![(*omega, 0u32)];
    let norm_kind = crate::geometry::NormKind::Inf;
    while let Some((r, depth)) = stack.pop() {
        if depth < max_depth && (depth == 0 || rng.gen_bool(0.5)) {
            for c in r.children().into_iter().rev() {
                stack.push((c, depth + 1));
            }
        } else {
            let set = MorseSet::cube(r.center(), 0.5 * r.extent(0), norm_kind)?;
            cells.push(FamilyCell {
                tag: set.tag,
                set,
                depth,
            });
        }
    }
    mu.check_inside(omega)?;
    Ok(TaggedFamily::assemble(*omega, norm_kind, cells, 0.0, Some(Vec::new())))
}
