use crate::error::Result;
use crate::geometry::{norm_ratio, Containment, NormKind, Point, Region};
use crate::measure::MeasureValue;
use crate::quadrature::{convex_bracket_cubature, integrate_over_set, DEFAULT_CELL_BUDGET};

use super::{meets_shell, ContinuityPiece, CorpusFunction, Discontinuity, Regularity, VectorValue};

/// Length of `[a, b] ∩ [c, d]`.
fn overlap(a: f64, b: f64, c: f64, d: f64) -> f64 {
    (b.min(d) - a.max(c)).max(0.0)
}

/// `f(x) = x` on `[0, 1]`, scalar.
#[derive(Clone, Debug)]
pub struct Linear1 {
    universe: Region,
    y_norm: NormKind,
}

impl Linear1 {
    pub fn new(y_norm: NormKind) -> Linear1 {
        Linear1 {
            universe: Region::cube(1, 0.0, 1.0),
            y_norm,
        }
    }
}

impl CorpusFunction for Linear1 {
    fn name(&self) -> &str {
        "linear1"
    }
    fn dim_in(&self) -> usize {
        1
    }
    fn dim_out(&self) -> usize {
        1
    }
    fn universe(&self) -> &Region {
        &self.universe
    }
    fn y_norm(&self) -> NormKind {
        self.y_norm
    }
    fn eval(&self, x: &Point) -> VectorValue {
        VectorValue::new(&[x.get(0)], self.y_norm)
    }
    fn exact_integral(&self, b: &Region) -> VectorValue {
        let (a, c) = (b.lo.get(0), b.hi.get(0));
        VectorValue::new(&[(c * c - a * a) / 2.0], self.y_norm)
    }
    fn abs_deviation(&self, b: &Region, c: &VectorValue, _tol: f64) -> Result<MeasureValue> {
        let (a, e) = (b.lo.get(0), b.hi.get(0));
        let c = c.components()[0];
        let v = if c <= a {
            ((e - c).powi(2) - (a - c).powi(2)) / 2.0
        } else if c >= e {
            ((c - a).powi(2) - (c - e).powi(2)) / 2.0
        } else {
            ((c - a).powi(2) + (e - c).powi(2)) / 2.0
        };
        Ok(MeasureValue::exact(v))
    }
    fn exceed_measure(&self, b: &Region, c: &VectorValue, eta: f64, _tol: f64) -> Result<MeasureValue> {
        let (a, e) = (b.lo.get(0), b.hi.get(0));
        let c = c.components()[0];
        Ok(MeasureValue::exact((e - a) - overlap(a, e, c - eta, c + eta)))
    }
    fn discontinuities(&self) -> &[Discontinuity] {
        &[]
    }
    fn regularity(&self, _x: &Point, _radius: f64, _domain_norm: NormKind) -> Option<Regularity> {
        Some(Regularity::Smooth1d {
            slope: 1.0,
            curvature: 0.0,
        })
    }
    fn lipschitz_on(&self, _region: &Region, _domain_norm: NormKind) -> Option<f64> {
        Some(1.0)
    }
    fn ac_modulus(&self, eps: f64) -> f64 {
        eps
    }
    fn shell_bound(&self, n: u32, domain_norm: NormKind) -> f64 {
        if meets_shell(&self.universe, n, domain_norm) {
            (n as f64).min(1.0)
        } else {
            0.0
        }
    }
    fn sup_norm(&self) -> Option<f64> {
        Some(1.0)
    }
    fn continuity_pieces(&self) -> Option<Vec<ContinuityPiece>> {
        Some(vec![ContinuityPiece {
            region: self.universe,
            value: None,
        }])
    }
    fn sign_constant(&self) -> bool {
        true
    }
}

/// `f(x) = ((x₁ + x₂)/32, x₁x₂/32)` on the unit square.
#[derive(Clone, Debug)]
pub struct Lipschitz2d {
    universe: Region,
    y_norm: NormKind,
}

/// Lipschitz constant from the Euclidean domain into Euclidean `R²`:
/// the Jacobian `[[1, 1], [x₂, x₁]] / 32` has Frobenius norm at most `2/32`.
const LIP_EUCLID: f64 = 1.0 / 16.0;

impl Lipschitz2d {
    pub fn new(y_norm: NormKind) -> Lipschitz2d {
        Lipschitz2d {
            universe: Region::cube(2, 0.0, 1.0),
            y_norm,
        }
    }

    /// Lipschitz constant for distances measured in `domain_norm`.
    pub fn lipschitz(&self, domain_norm: NormKind) -> f64 {
        norm_ratio(self.y_norm, NormKind::Two, 2) * LIP_EUCLID * norm_ratio(NormKind::Two, domain_norm, 2)
    }

    fn raw(x: &Point) -> [f64; 2] {
        let (a, b) = (x.get(0), x.get(1));
        [(a + b) / 32.0, a * b / 32.0]
    }
}

impl CorpusFunction for Lipschitz2d {
    fn name(&self) -> &str {
        "lipschitz2d"
    }
    fn dim_in(&self) -> usize {
        2
    }
    fn dim_out(&self) -> usize {
        2
    }
    fn universe(&self) -> &Region {
        &self.universe
    }
    fn y_norm(&self) -> NormKind {
        self.y_norm
    }
    fn eval(&self, x: &Point) -> VectorValue {
        VectorValue::new(&Self::raw(x), self.y_norm)
    }
    fn exact_integral(&self, b: &Region) -> VectorValue {
        let (a1, b1, a2, b2) = (b.lo.get(0), b.hi.get(0), b.lo.get(1), b.hi.get(1));
        let s1 = (b1 * b1 - a1 * a1) / 2.0;
        let s2 = (b2 * b2 - a2 * a2) / 2.0;
        let sum = s1 * (b2 - a2) + s2 * (b1 - a1);
        VectorValue::new(&[sum / 32.0, s1 * s2 / 32.0], self.y_norm)
    }
    fn abs_deviation(&self, b: &Region, c: &VectorValue, tol: f64) -> Result<MeasureValue> {
        // both components are affine in each variable separately, so
        // ‖f − c‖ is convex along every axis
        let cc = [c.components()[0], c.components()[1]];
        let kind = self.y_norm;
        let g = |p: &Point| {
            let v = Self::raw(p);
            crate::geometry::norm_of(&[v[0] - cc[0], v[1] - cc[1]], kind)
        };
        let (value, err) = convex_bracket_cubature(b, g, tol, DEFAULT_CELL_BUDGET)?;
        Ok(MeasureValue {
            value,
            error_bound: err,
        })
    }
    fn exact_abs_integral(&self, b: &Region) -> Result<MeasureValue> {
        let v = self.exact_integral(b);
        let [s, p] = [v.components()[0], v.components()[1]];
        match self.y_norm {
            // nonnegative components; x₁ + x₂ ≥ x₁x₂ on the unit square
            NormKind::One => Ok(MeasureValue::exact(s + p)),
            NormKind::Inf => Ok(MeasureValue::exact(s)),
            NormKind::Two => {
                let zero = VectorValue::zeros(2, self.y_norm);
                self.abs_deviation(b, &zero, 1e-9 * b.volume().max(1e-300))
            }
        }
    }
    fn exceed_measure(&self, b: &Region, c: &VectorValue, eta: f64, tol: f64) -> Result<MeasureValue> {
        let lip = self.lipschitz(NormKind::Two);
        let classify = |r: &Region| {
            let centre = r.center();
            let gc = self.eval(&centre).sub(c).norm();
            let rad = lip * r.farthest_distance(&centre, NormKind::Two);
            if gc - rad > eta {
                Containment::Inside
            } else if gc + rad <= eta {
                Containment::Outside
            } else {
                Containment::Boundary
            }
        };
        let r = integrate_over_set(b, 1, classify, |r| Ok((vec![r.volume()], r.volume())), tol, DEFAULT_CELL_BUDGET)?;
        Ok(MeasureValue {
            value: r.value[0],
            error_bound: r.error_bound,
        })
    }
    fn discontinuities(&self) -> &[Discontinuity] {
        &[]
    }
    fn regularity(&self, _x: &Point, _radius: f64, domain_norm: NormKind) -> Option<Regularity> {
        Some(Regularity::Lipschitz(self.lipschitz(domain_norm)))
    }
    fn lipschitz_on(&self, _region: &Region, domain_norm: NormKind) -> Option<f64> {
        Some(self.lipschitz(domain_norm))
    }
    fn ac_modulus(&self, eps: f64) -> f64 {
        eps / self.sup_norm().expect("bounded")
    }
    fn shell_bound(&self, n: u32, domain_norm: NormKind) -> f64 {
        // both components increase in each variable, so the sup over any part
        // of the square is at most the value at (1, 1)
        if meets_shell(&self.universe, n, domain_norm) {
            self.sup_norm().expect("bounded")
        } else {
            0.0
        }
    }
    fn sup_norm(&self) -> Option<f64> {
        Some(self.eval(&Point::new(&[1.0, 1.0])).norm())
    }
    fn continuity_pieces(&self) -> Option<Vec<ContinuityPiece>> {
        Some(vec![ContinuityPiece {
            region: self.universe,
            value: None,
        }])
    }
    fn sign_constant(&self) -> bool {
        true
    }
}

/// `f(x) = |x|^(−1/2)` on `[−1, 1]`, `f(0) = 0`.
#[derive(Clone, Debug)]
pub struct Spike1 {
    universe: Region,
    y_norm: NormKind,
    singular: [Discontinuity; 1],
}

impl Spike1 {
    pub fn new(y_norm: NormKind) -> Spike1 {
        Spike1 {
            universe: Region::cube(1, -1.0, 1.0),
            y_norm,
            singular: [Discontinuity {
                region: Region::cube(1, 0.0, 0.0),
                value_norms: (0.0, 0.0),
            }],
        }
    }

    /// `∫_p^q y^(−1/2) dy` for `0 ≤ p ≤ q`, without subtracting square roots.
    fn half_integral(p: f64, q: f64) -> f64 {
        if q <= p {
            return 0.0;
        }
        2.0 * (q - p) / (p.sqrt() + q.sqrt())
    }

    /// `∫_p^q (y^(−1/2) − c) dy` for `0 ≤ p < q` and `c > 0`, written so that
    /// tiny intervals next to `t = c⁻²` keep their relative accuracy.
    fn signed_piece(p: f64, q: f64, t: f64) -> f64 {
        let (sp, sq, st) = (p.sqrt(), q.sqrt(), t.sqrt());
        let gap = (t - p) / (st + sp) + (t - q) / (st + sq);
        (q - p) * gap / ((sp + sq) * st)
    }

    /// `∫_p^q |y^(−1/2) − c| dy` for `0 ≤ p ≤ q`.
    fn half_abs(p: f64, q: f64, c: f64) -> f64 {
        if q <= p {
            return 0.0;
        }
        if c <= 0.0 {
            return Self::half_integral(p, q) - c * (q - p);
        }
        let t = 1.0 / (c * c);
        let mut acc = 0.0;
        let u = q.min(t);
        if p < u {
            acc += Self::signed_piece(p, u, t);
        }
        let v = p.max(t);
        if v < q {
            acc -= Self::signed_piece(v, q, t);
        }
        acc
    }

    /// Measure of `{y ∈ [p, q] : |y^(−1/2) − c| > eta}` for `0 ≤ p ≤ q`.
    fn half_exceed(p: f64, q: f64, c: f64, eta: f64) -> f64 {
        if q <= p {
            return 0.0;
        }
        let above = if c + eta <= 0.0 {
            q - p
        } else {
            overlap(p, q, 0.0, (c + eta).powi(-2))
        };
        let below = if c - eta <= 0.0 {
            0.0
        } else {
            overlap(p, q, (c - eta).powi(-2), f64::INFINITY)
        };
        (above + below).min(q - p)
    }

    /// Split `[a, b]` into its mirrored negative half and its positive half.
    fn halves(b: &Region) -> [(f64, f64); 2] {
        let (a, e) = (b.lo.get(0), b.hi.get(0));
        [((-e).max(0.0), (-a).max(0.0)), (a.max(0.0), e.max(0.0))]
    }
}

impl CorpusFunction for Spike1 {
    fn name(&self) -> &str {
        "spike1"
    }
    fn dim_in(&self) -> usize {
        1
    }
    fn dim_out(&self) -> usize {
        1
    }
    fn universe(&self) -> &Region {
        &self.universe
    }
    fn y_norm(&self) -> NormKind {
        self.y_norm
    }
    fn eval(&self, x: &Point) -> VectorValue {
        let a = x.get(0).abs();
        VectorValue::new(&[if a == 0.0 { 0.0 } else { 1.0 / a.sqrt() }], self.y_norm)
    }
    fn exact_integral(&self, b: &Region) -> VectorValue {
        let v: f64 = Self::halves(b).iter().map(|&(p, q)| Self::half_integral(p, q)).sum();
        VectorValue::new(&[v], self.y_norm)
    }
    fn abs_deviation(&self, b: &Region, c: &VectorValue, _tol: f64) -> Result<MeasureValue> {
        let c = c.components()[0];
        let v = Self::halves(b).iter().map(|&(p, q)| Self::half_abs(p, q, c)).sum();
        Ok(MeasureValue::exact(v))
    }
    fn exceed_measure(&self, b: &Region, c: &VectorValue, eta: f64, _tol: f64) -> Result<MeasureValue> {
        let c = c.components()[0];
        let v = Self::halves(b).iter().map(|&(p, q)| Self::half_exceed(p, q, c, eta)).sum();
        Ok(MeasureValue::exact(v))
    }
    fn discontinuities(&self) -> &[Discontinuity] {
        &self.singular
    }
    fn regularity(&self, x: &Point, radius: f64, _domain_norm: NormKind) -> Option<Regularity> {
        let a = x.get(0).abs();
        (radius < a).then(|| Regularity::Smooth1d {
            slope: 0.5 * a.powf(-1.5),
            curvature: 0.75 * (a - radius).powf(-2.5),
        })
    }
    fn lipschitz_on(&self, region: &Region, _domain_norm: NormKind) -> Option<f64> {
        let m = region.distance_to(&Point::new(&[0.0]), NormKind::Two);
        (m > 0.0).then(|| 0.5 * m.powf(-1.5))
    }
    fn ac_modulus(&self, eps: f64) -> f64 {
        // the worst set of measure γ is [−γ/2, γ/2], carrying 2√(2γ)
        eps * eps / 8.0
    }
    fn shell_bound(&self, n: u32, _domain_norm: NormKind) -> f64 {
        match n {
            1 => f64::INFINITY,
            2 => 1.0,
            _ => 0.0,
        }
    }
    fn sup_norm(&self) -> Option<f64> {
        None
    }
    fn continuity_pieces(&self) -> Option<Vec<ContinuityPiece>> {
        Some(vec![
            ContinuityPiece {
                region: Region::cube(1, -1.0, 0.0),
                value: None,
            },
            ContinuityPiece {
                region: Region::cube(1, 0.0, 1.0),
                value: None,
            },
        ])
    }
    fn sign_constant(&self) -> bool {
        true
    }
    fn recommended_max_depth(&self) -> u32 {
        48
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spike_abs_deviation_closed_form() {
        let f = Spike1::new(NormKind::Two);
        // ∫_0^1 |y^(−1/2) − 2| dy: crossing at 1/4
        // [0, 1/4]: 1 − 1/2 = 1/2; [1/4, 1]: 3/2 − 1 = 1/2
        let c = VectorValue::new(&[2.0], NormKind::Two);
        let d = f.abs_deviation(&Region::cube(1, 0.0, 1.0), &c, 0.0).unwrap();
        assert!((d.value - 1.0).abs() < 1e-15);
        let sym = f.abs_deviation(&Region::cube(1, -1.0, 1.0), &c, 0.0).unwrap();
        assert!((sym.value - 2.0).abs() < 1e-15);
    }

    #[test]
    fn spike_exceed_measure() {
        let f = Spike1::new(NormKind::Two);
        // |y^(−1/2) − 2| > 1 ⇔ y < 1/9 or y > 1
        let c = VectorValue::new(&[2.0], NormKind::Two);
        let m = f.exceed_measure(&Region::cube(1, 0.0, 1.0), &c, 1.0, 0.0).unwrap();
        assert!((m.value - 1.0 / 9.0).abs() < 1e-15);
    }

    #[test]
    fn lipschitz_norm_conversion() {
        let f = Lipschitz2d::new(NormKind::Two);
        assert_eq!(f.lipschitz(NormKind::Two), 1.0 / 16.0);
        assert!((f.lipschitz(NormKind::Inf) - 2f64.sqrt() / 16.0).abs() < 1e-15);
        let g = Lipschitz2d::new(NormKind::One);
        assert!((g.lipschitz(NormKind::Two) - 2f64.sqrt() / 16.0).abs() < 1e-15);
    }

    #[test]
    fn lipschitz_exceed_matches_region() {
        // ‖f − 0‖_∞ = (x₁ + x₂)/32 > 1/32 ⇔ above the anti-diagonal: measure ½
        let f = Lipschitz2d::new(NormKind::Inf);
        let c = VectorValue::zeros(2, NormKind::Inf);
        let m = f.exceed_measure(&Region::cube(2, 0.0, 1.0), &c, 1.0 / 32.0, 1e-3).unwrap();
        assert!((m.value - 0.5).abs() <= m.error_bound + 1e-12, "{m:?}");
    }
}
