//! Test integrands with exact-integral oracles.
//!
//! Every entry knows its own integral over any box, the integral of its norm
//! deviation from a constant, where it jumps, and how regular it is near a
//! point. The gauge construction consumes that metadata directly.

mod piecewise;
mod smooth;

use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{norm_of, NormKind, Point, Region};
use crate::measure::MeasureValue;

pub use piecewise::PiecewiseConstant;
pub use smooth::{Linear1, Lipschitz2d, Spike1};

/// Largest supported target dimension.
pub const MAX_OUT: usize = 4;

/// A value in `Y = R^m` carrying the norm it is measured in.
#[derive(Clone, Copy, PartialEq)]
pub struct VectorValue {
    comps: [f64; MAX_OUT],
    len: u8,
    pub norm_kind: NormKind,
}

impl VectorValue {
    pub fn new(components: &[f64], norm_kind: NormKind) -> VectorValue {
        assert!(
            (1..=MAX_OUT).contains(&components.len()),
            "target dimension must be 1..=4"
        );
        let mut comps = [0.0; MAX_OUT];
        comps[..components.len()].copy_from_slice(components);
        VectorValue {
            comps,
            len: components.len() as u8,
            norm_kind,
        }
    }

    pub fn zeros(m: usize, norm_kind: NormKind) -> VectorValue {
        VectorValue::new(&vec![0.0; m], norm_kind)
    }

    pub fn components(&self) -> &[f64] {
        &self.comps[..self.len as usize]
    }

    pub fn dim(&self) -> usize {
        self.len as usize
    }

    pub fn norm(&self) -> f64 {
        norm_of(self.components(), self.norm_kind)
    }

    fn zip(&self, o: &VectorValue, f: impl Fn(f64, f64) -> f64) -> VectorValue {
        debug_assert_eq!(self.len, o.len);
        let mut out = *self;
        for k in 0..self.dim() {
            out.comps[k] = f(self.comps[k], o.comps[k]);
        }
        out
    }

    pub fn sub(&self, o: &VectorValue) -> VectorValue {
        self.zip(o, |a, b| a - b)
    }

    pub fn add(&self, o: &VectorValue) -> VectorValue {
        self.zip(o, |a, b| a + b)
    }

    pub fn scale(&self, s: f64) -> VectorValue {
        let mut out = *self;
        for k in 0..self.dim() {
            out.comps[k] *= s;
        }
        out
    }

    pub fn add_assign(&mut self, o: &VectorValue) {
        for k in 0..self.dim() {
            self.comps[k] += o.comps[k];
        }
    }

    pub fn is_finite(&self) -> bool {
        self.components().iter().all(|c| c.is_finite())
    }
}

impl fmt::Debug for VectorValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.components()).finish()
    }
}

impl Serialize for VectorValue {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.components().serialize(s)
    }
}

/// An axis-aligned piece of the discontinuity set (a point, or a segment /
/// face lying in a coordinate hyperplane) with the range of `‖f‖` the
/// one-sided assignment takes on it.
#[derive(Clone, Debug, Serialize)]
pub struct Discontinuity {
    pub region: Region,
    pub value_norms: (f64, f64),
}

/// A closed box on whose interior the function is continuous.
#[derive(Clone, Debug, Serialize)]
pub struct ContinuityPiece {
    pub region: Region,
    /// Set when the function is constant on the piece.
    pub value: Option<VectorValue>,
}

/// Local regularity on a ball that avoids the discontinuity set.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Regularity {
    Constant,
    /// One-dimensional, twice differentiable: `‖f'(x)‖` and `sup ‖f''‖` on the ball.
    Smooth1d { slope: f64, curvature: f64 },
    Lipschitz(f64),
}

pub trait CorpusFunction: Send + Sync + fmt::Debug {
    fn name(&self) -> &str;
    fn dim_in(&self) -> usize;
    fn dim_out(&self) -> usize;
    fn universe(&self) -> &Region;
    fn y_norm(&self) -> NormKind;

    fn eval(&self, x: &Point) -> VectorValue;

    /// Component-wise Lebesgue integral over `b`.
    fn exact_integral(&self, b: &Region) -> VectorValue;

    /// `∫_b ‖f − c‖ dx`, certified to `tol` where no closed form exists.
    fn abs_deviation(&self, b: &Region, c: &VectorValue, tol: f64) -> Result<MeasureValue>;

    /// `∫_b ‖f‖ dx`.
    fn exact_abs_integral(&self, b: &Region) -> Result<MeasureValue> {
        let zero = VectorValue::zeros(self.dim_out(), self.y_norm());
        self.abs_deviation(b, &zero, 1e-12 * b.volume().max(1e-300))
    }

    /// Lebesgue measure of `{y ∈ b : ‖f(y) − c‖ > eta}`.
    fn exceed_measure(&self, b: &Region, c: &VectorValue, eta: f64, tol: f64) -> Result<MeasureValue>;

    fn discontinuities(&self) -> &[Discontinuity];

    /// Distance to the declared discontinuity set (the universe diameter when empty).
    fn discontinuity_distance(&self, x: &Point, domain_norm: NormKind) -> f64 {
        self.discontinuities()
            .iter()
            .map(|d| d.region.distance_to(x, domain_norm))
            .fold(self.universe().diameter(domain_norm), f64::min)
    }

    /// Regularity on `B(x, radius)`; `None` when no certificate exists there.
    fn regularity(&self, x: &Point, radius: f64, domain_norm: NormKind) -> Option<Regularity>;

    /// Lipschitz constant of `f` on `region` if it lies in one continuity piece.
    fn lipschitz_on(&self, region: &Region, domain_norm: NormKind) -> Option<f64>;

    /// `γ > 0` with `|E| < γ ⇒ ∫_E ‖f‖ dx < eps` (Lebesgue measure).
    fn ac_modulus(&self, eps: f64) -> f64;

    /// Upper bound on `sup{‖f(x)‖ : n−1 ≤ |x| < n}` within the universe.
    fn shell_bound(&self, n: u32, domain_norm: NormKind) -> f64;

    fn sup_norm(&self) -> Option<f64>;

    fn continuity_pieces(&self) -> Option<Vec<ContinuityPiece>>;

    /// True when `‖f‖` is constant on the universe (every point is then a
    /// Lebesgue point of `‖f‖`).
    fn norm_is_constant(&self) -> bool {
        false
    }

    /// True when each component keeps one sign, so `Σ‖∫_{S_i} f‖` reaches `∫‖f‖`
    /// on fine families.
    fn sign_constant(&self) -> bool {
        false
    }

    /// Modelled `∫_{X∖Ω} ‖f‖` for the part of `X` outside the universe.
    fn tail_abs(&self) -> f64 {
        0.0
    }

    fn recommended_max_depth(&self) -> u32 {
        24
    }
}

/// Construction options for registry lookups.
#[derive(Clone, Copy, Debug)]
pub struct CorpusOptions {
    /// Input dimension for entries that support several (only `constant`).
    pub dim: Option<usize>,
    pub y_norm: NormKind,
    pub tail_abs: f64,
}

impl Default for CorpusOptions {
    fn default() -> Self {
        CorpusOptions {
            dim: None,
            y_norm: NormKind::Two,
            tail_abs: 0.0,
        }
    }
}

pub const NAMES: &[&str] = &[
    "constant",
    "linear1",
    "step2",
    "step2avg",
    "sign1",
    "checker2d",
    "lipschitz2d",
    "spike1",
];

pub fn lookup(name: &str, opts: &CorpusOptions) -> Result<Arc<dyn CorpusFunction>> {
    let f: Arc<dyn CorpusFunction> = match name {
        "constant" => Arc::new(PiecewiseConstant::constant(
            opts.dim.unwrap_or(2),
            &[0.75, -0.5],
            opts.y_norm,
        )?),
        "linear1" => Arc::new(Linear1::new(opts.y_norm)),
        "step2" => Arc::new(PiecewiseConstant::step2(opts.y_norm, false)),
        "step2avg" => Arc::new(PiecewiseConstant::step2(opts.y_norm, true)),
        "sign1" => Arc::new(PiecewiseConstant::sign1(opts.y_norm)),
        "checker2d" => Arc::new(PiecewiseConstant::checker2d(opts.y_norm)),
        "lipschitz2d" => Arc::new(Lipschitz2d::new(opts.y_norm)),
        "spike1" => Arc::new(Spike1::new(opts.y_norm)),
        other => return Err(Error::UnknownFunction(other.to_string())),
    };
    if let Some(d) = opts.dim {
        if d != f.dim_in() {
            return Err(Error::DimensionMismatch {
                expected: f.dim_in(),
                found: d,
            });
        }
    }
    if opts.tail_abs != 0.0 {
        return Ok(Arc::new(WithTail {
            inner: f,
            tail: opts.tail_abs,
        }));
    }
    Ok(f)
}

/// Report-friendly description of a corpus entry.
#[derive(Clone, Debug, Serialize)]
pub struct FunctionMetadata {
    pub name: String,
    pub dim_in: usize,
    pub dim_out: usize,
    pub universe: Region,
    pub y_norm: NormKind,
    pub discontinuities: Vec<Discontinuity>,
    pub sup_norm: Option<f64>,
    pub exact_total: VectorValue,
    pub abs_total: f64,
    pub tail_abs: f64,
}

pub fn metadata(f: &dyn CorpusFunction) -> Result<FunctionMetadata> {
    Ok(FunctionMetadata {
        name: f.name().to_string(),
        dim_in: f.dim_in(),
        dim_out: f.dim_out(),
        universe: *f.universe(),
        y_norm: f.y_norm(),
        discontinuities: f.discontinuities().to_vec(),
        sup_norm: f.sup_norm(),
        exact_total: f.exact_integral(f.universe()),
        abs_total: f.exact_abs_integral(f.universe())?.value,
        tail_abs: f.tail_abs(),
    })
}

/// Measure-facing wrapper: a corpus entry with a nonzero modelled tail.
#[derive(Debug)]
struct WithTail {
    inner: Arc<dyn CorpusFunction>,
    tail: f64,
}

impl CorpusFunction for WithTail {
    fn name(&self) -> &str {
        self.inner.name()
    }
    fn dim_in(&self) -> usize {
        self.inner.dim_in()
    }
    fn dim_out(&self) -> usize {
        self.inner.dim_out()
    }
    fn universe(&self) -> &Region {
        self.inner.universe()
    }
    fn y_norm(&self) -> NormKind {
        self.inner.y_norm()
    }
    fn eval(&self, x: &Point) -> VectorValue {
        self.inner.eval(x)
    }
    fn exact_integral(&self, b: &Region) -> VectorValue {
        self.inner.exact_integral(b)
    }
    fn abs_deviation(&self, b: &Region, c: &VectorValue, tol: f64) -> Result<MeasureValue> {
        self.inner.abs_deviation(b, c, tol)
    }
    fn exceed_measure(&self, b: &Region, c: &VectorValue, eta: f64, tol: f64) -> Result<MeasureValue> {
        self.inner.exceed_measure(b, c, eta, tol)
    }
    fn discontinuities(&self) -> &[Discontinuity] {
        self.inner.discontinuities()
    }
    fn regularity(&self, x: &Point, radius: f64, domain_norm: NormKind) -> Option<Regularity> {
        self.inner.regularity(x, radius, domain_norm)
    }
    fn lipschitz_on(&self, region: &Region, domain_norm: NormKind) -> Option<f64> {
        self.inner.lipschitz_on(region, domain_norm)
    }
    fn ac_modulus(&self, eps: f64) -> f64 {
        self.inner.ac_modulus(eps)
    }
    fn shell_bound(&self, n: u32, domain_norm: NormKind) -> f64 {
        self.inner.shell_bound(n, domain_norm)
    }
    fn sup_norm(&self) -> Option<f64> {
        self.inner.sup_norm()
    }
    fn continuity_pieces(&self) -> Option<Vec<ContinuityPiece>> {
        self.inner.continuity_pieces()
    }
    fn norm_is_constant(&self) -> bool {
        self.inner.norm_is_constant()
    }
    fn sign_constant(&self) -> bool {
        self.inner.sign_constant()
    }
    fn tail_abs(&self) -> f64 {
        self.tail
    }
    fn recommended_max_depth(&self) -> u32 {
        self.inner.recommended_max_depth()
    }
}

/// Which spatial shell bins `[n−1, n)` a closed value range touches.
pub(crate) fn value_bins(lo: f64, hi: f64) -> std::ops::RangeInclusive<u32> {
    (lo.floor() as u32 + 1)..=(hi.floor() as u32 + 1)
}

/// Does the box meet the shell `n−1 ≤ |x| < n`?
pub(crate) fn meets_shell(b: &Region, n: u32, domain_norm: NormKind) -> bool {
    let o = Point::origin(b.dim());
    b.distance_to(&o, domain_norm) < n as f64 && b.farthest_distance(&o, domain_norm) >= n as f64 - 1.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Region;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn all() -> Vec<Arc<dyn CorpusFunction>> {
        NAMES
            .iter()
            .map(|n| lookup(n, &CorpusOptions::default()).unwrap())
            .collect()
    }

    fn random_box<R: Rng>(u: &Region, rng: &mut R) -> Region {
        let a = u.sample(rng);
        let b = u.sample(rng);
        Region {
            lo: a.map2(&b, f64::min),
            hi: a.map2(&b, f64::max),
        }
    }

    #[test]
    fn eval_examples() {
        let step2 = lookup("step2", &CorpusOptions::default()).unwrap();
        assert_eq!(step2.eval(&Point::new(&[0.25])).components(), &[1.0, 0.0]);
        assert_eq!(step2.eval(&Point::new(&[0.5])).components(), &[0.0, 1.0]);
        let lin = lookup("linear1", &CorpusOptions::default()).unwrap();
        assert_eq!(lin.eval(&Point::new(&[0.5])).components(), &[0.5]);
        let spike = lookup("spike1", &CorpusOptions::default()).unwrap();
        assert_eq!(spike.eval(&Point::new(&[0.25])).components(), &[2.0]);
        assert_eq!(spike.eval(&Point::new(&[0.0])).components(), &[0.0]);
        let avg = lookup("step2avg", &CorpusOptions::default()).unwrap();
        assert_eq!(avg.eval(&Point::new(&[0.5])).components(), &[0.5, 0.5]);
    }

    #[test]
    fn integral_examples() {
        let o = CorpusOptions::default();
        let u1 = Region::cube(1, 0.0, 1.0);
        assert_eq!(lookup("step2", &o).unwrap().exact_integral(&u1).components(), &[0.5, 0.5]);
        let lin = lookup("linear1", &o).unwrap();
        let b = Region::cube(1, 0.2, 0.7);
        assert!((lin.exact_integral(&b).components()[0] - (0.49 - 0.04) / 2.0).abs() < 1e-15);
        assert_eq!(lookup("spike1", &o).unwrap().exact_integral(&u1).components(), &[2.0]);
    }

    #[test]
    fn ac_modulus_examples() {
        let o = CorpusOptions::default();
        assert_eq!(lookup("step2", &o).unwrap().ac_modulus(0.1), 0.1);
        let spike = lookup("spike1", &o).unwrap();
        assert!((spike.ac_modulus(0.1) - 0.01 / 8.0).abs() < 1e-18);
        let zero = PiecewiseConstant::constant(2, &[0.0, 0.0], NormKind::Two).unwrap();
        assert_eq!(zero.ac_modulus(0.1), 1.0);
        let c = PiecewiseConstant::constant(1, &[3.0, 4.0], NormKind::Two).unwrap();
        assert_eq!(c.ac_modulus(0.5), 0.1);
    }

    #[test]
    fn discontinuity_distance_examples() {
        let o = CorpusOptions::default();
        let step2 = lookup("step2", &o).unwrap();
        assert!((step2.discontinuity_distance(&Point::new(&[0.3]), NormKind::Two) - 0.2).abs() < 1e-15);
        let lin = lookup("linear1", &o).unwrap();
        assert_eq!(lin.discontinuity_distance(&Point::new(&[0.3]), NormKind::Two), 1.0);
        let jump = PiecewiseConstant::vertical_jump(NormKind::Two);
        assert!((jump.discontinuity_distance(&Point::new(&[0.2, 0.9]), NormKind::Two) - 0.3).abs() < 1e-15);
    }

    /// Tensor Gauss–Legendre brute force, independent of the closed forms.
    fn brute_integral(f: &dyn CorpusFunction, b: &Region, splits: usize) -> Vec<f64> {
        const X: [f64; 5] = [-0.906_179_845_938_664, -0.538_469_310_105_683, 0.0, 0.538_469_310_105_683, 0.906_179_845_938_664];
        const W: [f64; 5] = [0.236_926_885_056_189, 0.478_628_670_499_366, 0.568_888_888_888_889, 0.478_628_670_499_366, 0.236_926_885_056_189];
        let d = b.dim();
        let mut acc = vec![0.0; f.dim_out()];
        let cells = splits.pow(d as u32);
        for c in 0..cells {
            let mut lo = b.lo;
            let mut h = b.lo;
            let mut rem = c;
            for k in 0..d {
                let i = rem % splits;
                rem /= splits;
                let w = b.extent(k) / splits as f64;
                lo.set(k, b.lo.get(k) + i as f64 * w);
                h.set(k, w);
            }
            for q in 0..5usize.pow(d as u32) {
                let mut p = lo;
                let mut wt = 1.0;
                let mut r = q;
                for k in 0..d {
                    let j = r % 5;
                    r /= 5;
                    p.set(k, lo.get(k) + 0.5 * h.get(k) * (X[j] + 1.0));
                    wt *= 0.5 * h.get(k) * W[j];
                }
                for (a, v) in acc.iter_mut().zip(f.eval(&p).components()) {
                    *a += wt * v;
                }
            }
        }
        acc
    }

    #[test]
    fn oracle_matches_brute_force_on_bounded_entries() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for f in all() {
            if f.name() == "spike1" {
                continue;
            }
            for _ in 0..20 {
                let b = random_box(f.universe(), &mut rng);
                let exact = f.exact_integral(&b);
                let brute = brute_integral(f.as_ref(), &b, 64);
                // piecewise-constant entries: each brute cell straddling a jump
                // errs by at most sup‖f‖ · cell volume
                let cell = b.volume() / 64f64.powi(b.dim() as i32);
                let boundary_cells = 2.0 * 6.0 * 64f64.powi(b.dim() as i32 - 1);
                let bound = 2.0 * 2.0 * cell * boundary_cells + 1e-12;
                for (e, q) in exact.components().iter().zip(&brute) {
                    assert!((e - q).abs() <= bound, "{} on {b:?}: {e} vs {q}", f.name());
                }
            }
        }
    }

    #[test]
    fn abs_deviation_matches_sampling() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for f in all() {
            let u = *f.universe();
            for _ in 0..5 {
                let b = random_box(&u, &mut rng);
                let c = f.eval(&u.sample(&mut rng));
                let d = f.abs_deviation(&b, &c, 1e-6).unwrap();
                // midpoint brute force on a fine grid, skipping the spike cell
                let n: usize = if b.dim() == 1 { 20000 } else { 300 };
                let mut acc = 0.0;
                let cells = n.pow(b.dim() as u32);
                for i in 0..cells {
                    let mut p = b.lo;
                    let mut r = i;
                    for k in 0..b.dim() {
                        let j = r % n;
                        r /= n;
                        p.set(k, b.lo.get(k) + (j as f64 + 0.5) * b.extent(k) / n as f64);
                    }
                    acc += f.eval(&p).sub(&c).norm();
                }
                acc *= b.volume() / cells as f64;
                let tol = if f.name() == "spike1" { 0.05 } else { 0.01 } * (1.0 + d.value);
                assert!((acc - d.value).abs() <= tol + d.error_bound, "{}: {acc} vs {:?}", f.name(), d);
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn oracle_additive_under_dyadic_split(idx in 0usize..8, a in 0.0f64..1.0, b in 0.0f64..1.0, c in 0.0f64..1.0, e in 0.0f64..1.0) {
            let f = lookup(NAMES[idx], &CorpusOptions::default()).unwrap();
            let u = *f.universe();
            let d = u.dim();
            let t = [a, b, c, e];
            let mut lo = u.lo;
            let mut hi = u.lo;
            for k in 0..d {
                let x0 = u.lo.get(k) + u.extent(k) * t[k].min(t[(k + 1) % 4]);
                let x1 = u.lo.get(k) + u.extent(k) * t[k].max(t[(k + 1) % 4]);
                lo.set(k, x0);
                hi.set(k, x1);
            }
            let bx = Region { lo, hi };
            let whole = f.exact_integral(&bx);
            let mut parts = VectorValue::zeros(f.dim_out(), f.y_norm());
            for ch in bx.children() {
                parts.add_assign(&f.exact_integral(&ch));
            }
            for (x, y) in whole.components().iter().zip(parts.components()) {
                prop_assert!((x - y).abs() <= 1e-12 * (1.0 + x.abs()));
            }
        }
    }

    #[test]
    fn ac_modulus_sound_on_random_box_unions() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for f in all() {
            for eps in [0.1, 0.01] {
                let gamma = f.ac_modulus(eps);
                assert!(gamma > 0.0);
                for _ in 0..100 {
                    // union of up to 4 disjoint slabs along axis 0, total measure < γ,
                    // one of them pinned against the worst point when the entry has one
                    let u = *f.universe();
                    let mut total = 0.0;
                    let mut abs = 0.0;
                    let pieces = rng.gen_range(1..=4);
                    let budget = gamma * rng.gen_range(0.5..0.999) / pieces as f64;
                    let mut used: Vec<(f64, f64)> = Vec::new();
                    for j in 0..pieces {
                        let width = budget / (u.volume() / u.extent(0));
                        let centre = if j == 0 && f.name() == "spike1" {
                            0.0
                        } else {
                            rng.gen_range(u.lo.get(0)..u.hi.get(0))
                        };
                        let (x0, x1) = ((centre - width / 2.0).max(u.lo.get(0)), (centre + width / 2.0).min(u.hi.get(0)));
                        if used.iter().any(|(a, b)| x0 < *b && *a < x1) {
                            continue;
                        }
                        used.push((x0, x1));
                        let mut lo = u.lo;
                        let mut hi = u.hi;
                        lo.set(0, x0);
                        hi.set(0, x1);
                        let slab = Region { lo, hi };
                        total += slab.volume();
                        abs += f.exact_abs_integral(&slab).unwrap().upper();
                    }
                    assert!(total < gamma);
                    assert!(abs < eps, "{}: ∫_E ‖f‖ = {abs} ≥ {eps}", f.name());
                }
            }
        }
    }
}
