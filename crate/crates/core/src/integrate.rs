//! Integrals of corpus functions against a density measure.
//!
//! The density is constant on grid cells, so every box integral splits into
//! finitely many Lebesgue oracle calls scaled by the cell density.

use std::cell::Cell;

use crate::corpus::{CorpusFunction, VectorValue};
use crate::error::Result;
use crate::geometry::{MorseSet, NormKind, Region, Shape};
use crate::measure::{MeasureValue, RadonMeasure};
use crate::quadrature::{integrate_over_set, DEFAULT_CELL_BUDGET};

fn pieces(mu: &RadonMeasure, b: &Region) -> Vec<(Region, f64)> {
    let mut out = Vec::new();
    mu.for_each_piece(b, |r, w| {
        if w > 0.0 {
            out.push((*r, w))
        }
    });
    out
}

/// `∫_b f dμ`.
pub fn box_integral(f: &dyn CorpusFunction, mu: &RadonMeasure, b: &Region) -> Result<VectorValue> {
    mu.check_inside(b)?;
    let mut acc = VectorValue::zeros(f.dim_out(), f.y_norm());
    for (r, w) in pieces(mu, b) {
        acc.add_assign(&f.exact_integral(&r).scale(w));
    }
    Ok(acc)
}

/// `∫_b ‖f − c‖ dμ`, certified to `tol`.
pub fn box_abs_deviation(
    f: &dyn CorpusFunction,
    mu: &RadonMeasure,
    b: &Region,
    c: &VectorValue,
    tol: f64,
) -> Result<MeasureValue> {
    mu.check_inside(b)?;
    let ps = pieces(mu, b);
    let n = ps.len().max(1) as f64;
    let mut acc = MeasureValue::exact(0.0);
    for (r, w) in ps {
        let v = f.abs_deviation(&r, c, tol / (n * w))?;
        acc = acc
            + MeasureValue {
                value: w * v.value,
                error_bound: w * v.error_bound,
            };
    }
    Ok(acc)
}

/// `∫_b ‖f‖ dμ`.
pub fn box_abs_integral(f: &dyn CorpusFunction, mu: &RadonMeasure, b: &Region) -> Result<MeasureValue> {
    mu.check_inside(b)?;
    let mut acc = MeasureValue::exact(0.0);
    for (r, w) in pieces(mu, b) {
        let v = f.exact_abs_integral(&r)?;
        acc = acc
            + MeasureValue {
                value: w * v.value,
                error_bound: w * v.error_bound,
            };
    }
    Ok(acc)
}

/// `μ({y ∈ b : ‖f(y) − c‖ > eta})`.
pub fn box_exceed(
    f: &dyn CorpusFunction,
    mu: &RadonMeasure,
    b: &Region,
    c: &VectorValue,
    eta: f64,
    tol: f64,
) -> Result<MeasureValue> {
    mu.check_inside(b)?;
    let ps = pieces(mu, b);
    let n = ps.len().max(1) as f64;
    let mut acc = MeasureValue::exact(0.0);
    for (r, w) in ps {
        let v = f.exceed_measure(&r, c, eta, tol / (n * w))?;
        acc = acc
            + MeasureValue {
                value: w * v.value,
                error_bound: w * v.error_bound,
            };
    }
    Ok(acc)
}

/// Sets whose measure-theoretic extent is exactly their bounding box.
pub fn is_box_set(s: &MorseSet) -> bool {
    match &s.shape {
        Shape::Cube { .. } => true,
        Shape::Ball { norm, .. } => s.dim() == 1 || *norm == NormKind::Inf,
        Shape::Star2D { .. } => false,
    }
}

/// Shared driver for set-level integrals of box functionals over `S ∩ U`:
/// exact on box sets, adaptive boundary refinement otherwise. Inner oracle
/// errors are added to the refinement error.
fn over_set<F>(mu: &RadonMeasure, s: &MorseSet, width: usize, tol: f64, term: F) -> Result<(Vec<f64>, f64)>
where
    F: Fn(&Region, f64) -> Result<(Vec<f64>, f64, f64)>,
{
    let Some(root) = s.bounding_box().intersect(mu.universe()) else {
        return Ok((vec![0.0; width], 0.0));
    };
    if root.is_degenerate() {
        return Ok((vec![0.0; width], 0.0));
    }
    if is_box_set(s) {
        let (v, _, e) = term(&root, tol)?;
        return Ok((v, e));
    }
    let root_vol = root.volume();
    let inner_err = Cell::new(0.0);
    let r = integrate_over_set(
        &root,
        width,
        |b| s.classify(b),
        |b| {
            // each depth level gets at most a 2⁻ᵏ share of the inner budget
            let share = (b.volume() / root_vol).sqrt();
            let (v, abs, e) = term(b, 0.25 * tol * share)?;
            inner_err.set(inner_err.get() + e);
            Ok((v, abs + e))
        },
        0.5 * tol,
        DEFAULT_CELL_BUDGET,
    )?;
    Ok((r.value, r.error_bound + inner_err.get()))
}

/// `μ(S ∩ U)`.
pub fn set_measure(mu: &RadonMeasure, s: &MorseSet, tol: f64) -> Result<MeasureValue> {
    if mu.universe().contains_region(&s.bounding_box()) {
        return crate::measure::measure_morse_set(mu, s, tol);
    }
    let (v, e) = over_set(mu, s, 1, tol, |b, _| {
        let m = crate::measure::measure_box(mu, b)?.value;
        Ok((vec![m], m, 0.0))
    })?;
    Ok(MeasureValue {
        value: v[0],
        error_bound: e,
    })
}

/// `∫_S f dμ` with a bound on the error of each component.
pub fn set_integral(f: &dyn CorpusFunction, mu: &RadonMeasure, s: &MorseSet, tol: f64) -> Result<(VectorValue, f64)> {
    let (v, e) = over_set(mu, s, f.dim_out(), tol, |b, _| {
        let v = box_integral(f, mu, b)?;
        let abs = box_abs_integral(f, mu, b)?;
        Ok((v.components().to_vec(), abs.upper(), 0.0))
    })?;
    Ok((VectorValue::new(&v, f.y_norm()), e))
}

/// `∫_S ‖f − c‖ dμ`.
pub fn set_abs_deviation(
    f: &dyn CorpusFunction,
    mu: &RadonMeasure,
    s: &MorseSet,
    c: &VectorValue,
    tol: f64,
) -> Result<MeasureValue> {
    let (v, e) = over_set(mu, s, 1, tol, |b, t| {
        let d = box_abs_deviation(f, mu, b, c, t)?;
        Ok((vec![d.value], d.value, d.error_bound))
    })?;
    Ok(MeasureValue {
        value: v[0],
        error_bound: e,
    })
}

/// `μ(E ∩ S)` with `E = {‖f − c‖ > eta}`.
pub fn set_exceed(
    f: &dyn CorpusFunction,
    mu: &RadonMeasure,
    s: &MorseSet,
    c: &VectorValue,
    eta: f64,
    tol: f64,
) -> Result<MeasureValue> {
    let (v, e) = over_set(mu, s, 1, tol, |b, t| {
        let d = box_exceed(f, mu, b, c, eta, t)?;
        let m = crate::measure::measure_box(mu, b)?.value;
        Ok((vec![d.value], m, d.error_bound))
    })?;
    Ok(MeasureValue {
        value: v[0],
        error_bound: e,
    })
}

/// `γ` with `μ(E) < γ ⇒ ∫_E ‖f‖ dμ < eps`: Lebesgue sets shrink by the least
/// positive density, values grow by the largest.
pub fn ac_modulus_weighted(f: &dyn CorpusFunction, mu: &RadonMeasure, eps: f64) -> f64 {
    let w_max = mu.max_density();
    if w_max <= 0.0 {
        return mu.universe().volume();
    }
    mu.min_positive_density() * f.ac_modulus(eps / w_max)
}
