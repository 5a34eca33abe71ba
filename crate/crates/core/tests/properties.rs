use std::sync::Arc;

use morse_gauge::analysis::CoverFamily;
use morse_gauge::corpus::{lookup, CorpusFunction, CorpusOptions, VectorValue, NAMES};
use morse_gauge::geometry::{norm_of, norm_ratio, Gauge, MorseSet, NormKind, Point, Region};
use morse_gauge::measure::RadonMeasure;
use morse_gauge::partition::{dyadic_sieve, verify_family, SieveParams};
use morse_gauge::riemann::{simple_function_at, simple_sum, Pipeline, TheoremOptions};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const NORMS: [NormKind; 3] = [NormKind::One, NormKind::Two, NormKind::Inf];

fn all() -> Vec<Arc<dyn CorpusFunction>> {
    NAMES
        .iter()
        .map(|n| lookup(n, &CorpusOptions::default()).unwrap())
        .collect()
}

/// A sub-box of `u` from fractions in `[0, 1]`.
fn sub_box(u: &Region, fr: &[(f64, f64)]) -> Region {
    let mut lo = u.lo;
    let mut hi = u.hi;
    for k in 0..u.dim() {
        let (a, b) = fr[k];
        let (a, b) = (a.min(b), a.max(b));
        lo.set(k, u.lo.get(k) + a * u.extent(k));
        hi.set(k, u.lo.get(k) + b * u.extent(k));
    }
    Region { lo, hi }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn norm_ratio_bounds_every_vector(v in prop::collection::vec(-10.0f64..10.0, 1..=3), i in 0usize..3, j in 0usize..3) {
        let (to, from) = (NORMS[i], NORMS[j]);
        let r = norm_ratio(to, from, v.len());
        prop_assert!(norm_of(&v, to) <= r * norm_of(&v, from) * (1.0 + 1e-12) + 1e-300);
    }

    #[test]
    fn morse_cube_sits_between_its_balls(
        c in prop::collection::vec(-1.0f64..1.0, 2),
        h in 0.01f64..1.0,
        k in 0usize..3,
        seed in any::<u64>(),
    ) {
        let s = MorseSet::cube(Point::new(&c), h, NORMS[k]).unwrap();
        let r = s.inner_radius();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let bbox = s.bounding_box();
        for _ in 0..50 {
            let y = bbox.sample(&mut rng);
            let d = y.distance(&s.tag, NORMS[k]);
            if d < r {
                prop_assert!(s.contains(&y));
            }
            if s.contains(&y) {
                prop_assert!(d <= s.lambda * r * (1.0 + 1e-12));
            }
        }
    }

    #[test]
    fn oracle_integral_is_additive(idx in 0usize..8, fr in prop::collection::vec((0.0f64..1.0, 0.0f64..1.0), 2), cut in 0.0f64..1.0, axis in 0usize..2) {
        let f = &all()[idx];
        let b = sub_box(f.universe(), &fr);
        let k = axis % b.dim();
        let at = b.lo.get(k) + cut * b.extent(k);
        let (mut left, mut right) = (b, b);
        left.hi.set(k, at);
        right.lo.set(k, at);
        let whole = f.exact_integral(&b);
        let parts = f.exact_integral(&left).add(&f.exact_integral(&right));
        prop_assert!(whole.sub(&parts).norm() <= 1e-12 * (1.0 + f.exact_abs_integral(&b).unwrap().upper()));
    }

    #[test]
    fn deviation_dominates_integral_defect(idx in 0usize..8, fr in prop::collection::vec((0.0f64..1.0, 0.0f64..1.0), 2), seed in any::<u64>()) {
        let f = &all()[idx];
        let b = sub_box(f.universe(), &fr);
        prop_assume!(!b.is_degenerate());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let c = f.eval(&f.universe().sample(&mut rng));
        let dev = f.abs_deviation(&b, &c, 1e-9 * b.volume()).unwrap();
        // ‖∫_b f − c·|b|‖ ≤ ∫_b ‖f − c‖
        let defect = f.exact_integral(&b).sub(&c.scale(b.volume())).norm();
        prop_assert!(defect <= dev.upper() * (1.0 + 1e-9) + 1e-12);
        // Markov: η · |{‖f − c‖ > η}| ≤ ∫_b ‖f − c‖
        let eta = 0.1 + c.norm();
        let ex = f.exceed_measure(&b, &c, eta, 1e-9 * b.volume()).unwrap();
        prop_assert!(ex.lower() <= b.volume() * (1.0 + 1e-12));
        prop_assert!(eta * ex.lower() <= dev.upper() * (1.0 + 1e-9) + 1e-12);
    }

    #[test]
    fn sieve_under_constant_gauge_is_a_fine_partition(delta in 0.05f64..1.0, d in 1usize..=2) {
        let u = Region::cube(d, 0.0, 1.0);
        let mu = RadonMeasure::lebesgue(u);
        let g = Gauge::constant(delta).unwrap();
        let fam = dyadic_sieve(&u, &g, &mu, &SieveParams::new(1e-12), NormKind::Inf).unwrap();
        prop_assert!(verify_family(&fam, &g, &mu, 1e-12));
        let covered: f64 = fam.cells.iter().map(|c| c.bounds().volume()).sum();
        prop_assert!((covered - 1.0).abs() < 1e-12);
    }

    #[test]
    fn simple_function_takes_the_tag_value(idx in 0usize..8, eps in 0.05f64..0.5, seed in any::<u64>()) {
        let f = all()[idx].clone();
        let mu = Arc::new(RadonMeasure::lebesgue(*f.universe()));
        let o = TheoremOptions::new(f.as_ref(), CoverFamily::cubes(f.dim_in(), NormKind::Inf));
        let p = Pipeline::new(f.clone(), mu.clone(), eps, o).unwrap();
        let fam = p.family(0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..20 {
            let c = &fam.cells[rand::Rng::gen_range(&mut rng, 0..fam.cells.len())];
            let y = c.set.bounding_box().sample(&mut rng);
            if fam.cells.iter().filter(|o| o.set.contains(&y)).count() == 1 {
                prop_assert_eq!(simple_function_at(&fam, f.as_ref(), &y), f.eval(&c.tag));
            }
        }
        let mut manual = VectorValue::zeros(f.dim_out(), f.y_norm());
        for c in &fam.cells {
            manual.add_assign(&f.eval(&c.tag).scale(c.bounds().volume()));
        }
        prop_assert_eq!(manual, simple_sum(&fam, f.as_ref(), &mu).unwrap());
    }

    #[test]
    fn theorem_gauge_maps_into_unit_interval(idx in 0usize..8, eps in 0.005f64..0.5, seed in any::<u64>()) {
        let f = all()[idx].clone();
        let mu = Arc::new(RadonMeasure::lebesgue(*f.universe()));
        let o = TheoremOptions::new(f.as_ref(), CoverFamily::cubes(f.dim_in(), NormKind::Inf));
        let p = Pipeline::new(f.clone(), mu, eps, o).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..50 {
            let x = f.universe().sample(&mut rng);
            let d = p.gauge.eval(&x).unwrap();
            prop_assert!(d > 0.0 && d <= 1.0, "δ({x:?}) = {d}");
        }
    }
}

#[test]
fn smaller_eps_gives_a_pointwise_smaller_gauge() {
    for f in all() {
        let mu = Arc::new(RadonMeasure::lebesgue(*f.universe()));
        let fam = CoverFamily::cubes(f.dim_in(), NormKind::Inf);
        let coarse = Pipeline::new(f.clone(), mu.clone(), 0.1, TheoremOptions::new(f.as_ref(), fam.clone())).unwrap();
        let fine = Pipeline::new(f.clone(), mu, 0.01, TheoremOptions::new(f.as_ref(), fam)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..200 {
            let x = f.universe().sample(&mut rng);
            let (a, b) = (coarse.gauge.eval(&x).unwrap(), fine.gauge.eval(&x).unwrap());
            assert!(b <= a * (1.0 + 1e-12), "{}: δ_0.01({x:?}) = {b} > δ_0.1 = {a}", f.name());
        }
    }
}
