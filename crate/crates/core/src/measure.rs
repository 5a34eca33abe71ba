//! Density-weighted Lebesgue measure on a bounded universe box.
//!
//! The density is piecewise constant on a dyadic grid of the universe, so box
//! measures are exact finite sums. Other Morse sets use closed forms where
//! available and certified cell subdivision otherwise.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Containment, MorseSet, NormKind, Point, Region, Shape};
use crate::quadrature::{integrate_over_set, DEFAULT_CELL_BUDGET};

/// A measured quantity with a certified absolute error.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MeasureValue {
    pub value: f64,
    pub error_bound: f64,
}

impl MeasureValue {
    pub fn exact(value: f64) -> MeasureValue {
        MeasureValue {
            value,
            error_bound: 0.0,
        }
    }

    pub fn upper(&self) -> f64 {
        self.value + self.error_bound
    }

    pub fn lower(&self) -> f64 {
        (self.value - self.error_bound).max(0.0)
    }
}

impl std::ops::Add for MeasureValue {
    type Output = MeasureValue;
    fn add(self, o: MeasureValue) -> MeasureValue {
        MeasureValue {
            value: self.value + o.value,
            error_bound: self.error_bound + o.error_bound,
        }
    }
}

impl std::iter::Sum for MeasureValue {
    fn sum<I: Iterator<Item = MeasureValue>>(iter: I) -> MeasureValue {
        iter.fold(MeasureValue::default(), |a, b| a + b)
    }
}

/// On-disk density grid: `values` holds `2^(level·d)` entries, row-major with
/// axis 0 varying slowest.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DensityGrid {
    pub level: u32,
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RadonMeasure {
    universe: Region,
    level: u32,
    values: Vec<f64>,
    total: f64,
    uniform: Option<f64>,
}

pub const DEFAULT_DENSITY_LEVEL: u32 = 6;

impl RadonMeasure {
    /// Unit-density Lebesgue measure on `universe`.
    pub fn lebesgue(universe: Region) -> RadonMeasure {
        Self::uniform(universe, 1.0)
    }

    pub fn uniform(universe: Region, w: f64) -> RadonMeasure {
        RadonMeasure {
            universe,
            level: 0,
            values: vec![w],
            total: w * universe.volume(),
            uniform: Some(w),
        }
    }

    pub fn from_grid(universe: Region, grid: DensityGrid) -> Result<RadonMeasure> {
        let d = universe.dim() as u32;
        let expected = 1usize
            .checked_shl(grid.level * d)
            .ok_or_else(|| Error::Config(format!("density level {} too large", grid.level)))?;
        if grid.values.len() != expected {
            return Err(Error::Config(format!(
                "density grid at level {} needs {expected} values, got {}",
                grid.level,
                grid.values.len()
            )));
        }
        if grid.values.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::Config("density values must be finite and nonnegative".into()));
        }
        if universe.is_degenerate() {
            return Err(Error::MalformedShape("degenerate universe".into()));
        }
        let uniform = if grid.values.iter().all(|w| *w == grid.values[0]) {
            Some(grid.values[0])
        } else {
            None
        };
        let mut mu = RadonMeasure {
            universe,
            level: grid.level,
            values: grid.values,
            total: 0.0,
            uniform,
        };
        mu.total = mu.measure_box_unchecked(&universe);
        Ok(mu)
    }

    pub fn load(universe: Region, path: &Path) -> Result<RadonMeasure> {
        let text = std::fs::read_to_string(path)?;
        let grid = match path.extension().and_then(|e| e.to_str()) {
            Some("csv") => parse_csv_grid(&text)?,
            _ => serde_json::from_str(&text)?,
        };
        Self::from_grid(universe, grid)
    }

    pub fn universe(&self) -> &Region {
        &self.universe
    }

    pub fn dim(&self) -> usize {
        self.universe.dim()
    }

    pub fn total(&self) -> f64 {
        self.total
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn grid(&self) -> DensityGrid {
        DensityGrid {
            level: self.level,
            values: self.values.clone(),
        }
    }

    pub fn max_density(&self) -> f64 {
        self.values.iter().cloned().fold(0.0, f64::max)
    }

    pub fn min_positive_density(&self) -> f64 {
        self.values
            .iter()
            .cloned()
            .filter(|w| *w > 0.0)
            .fold(f64::INFINITY, f64::min)
    }

    fn cells_per_axis(&self) -> usize {
        1usize << self.level
    }

    fn index_range(&self, b: &Region, k: usize) -> (usize, usize) {
        let n = self.cells_per_axis();
        let h = self.universe.extent(k) / n as f64;
        let lo = ((b.lo.get(k) - self.universe.lo.get(k)) / h).floor().max(0.0) as usize;
        let hi = ((b.hi.get(k) - self.universe.lo.get(k)) / h).ceil().max(1.0) as usize;
        (lo.min(n - 1), hi.min(n).max(lo.min(n - 1) + 1))
    }

    fn grid_cell(&self, idx: &[usize]) -> Region {
        let n = self.cells_per_axis() as f64;
        let mut lo = self.universe.lo;
        let mut hi = self.universe.hi;
        for (k, &i) in idx.iter().enumerate() {
            let h = self.universe.extent(k) / n;
            let base = self.universe.lo.get(k);
            lo.set(k, base + i as f64 * h);
            hi.set(k, if i + 1 == n as usize { self.universe.hi.get(k) } else { base + (i + 1) as f64 * h });
        }
        Region { lo, hi }
    }

    /// Visit every `(b ∩ grid cell, density)` piece with positive volume.
    pub fn for_each_piece(&self, b: &Region, mut visit: impl FnMut(&Region, f64)) {
        if let Some(w) = self.uniform {
            if let Some(piece) = b.intersect(&self.universe) {
                visit(&piece, w);
            }
            return;
        }
        let d = self.dim();
        let ranges: Vec<(usize, usize)> = (0..d).map(|k| self.index_range(b, k)).collect();
        let n = self.cells_per_axis();
        let mut idx: Vec<usize> = ranges.iter().map(|r| r.0).collect();
        loop {
            let cell = self.grid_cell(&idx);
            if let Some(piece) = cell.intersect(b) {
                if !piece.is_degenerate() {
                    let flat = idx.iter().fold(0usize, |acc, &i| acc * n + i);
                    visit(&piece, self.values[flat]);
                }
            }
            // odometer, last axis fastest
            let mut k = d;
            loop {
                if k == 0 {
                    return;
                }
                k -= 1;
                idx[k] += 1;
                if idx[k] < ranges[k].1 {
                    break;
                }
                idx[k] = ranges[k].0;
            }
        }
    }

    /// The density value if it is constant on `b`.
    pub fn uniform_on(&self, b: &Region) -> Option<f64> {
        if let Some(w) = self.uniform {
            return Some(w);
        }
        let mut first: Option<f64> = None;
        let mut same = true;
        self.for_each_piece(b, |_, w| match first {
            None => first = Some(w),
            Some(f) if f != w => same = false,
            _ => {}
        });
        if same {
            first
        } else {
            None
        }
    }

    fn measure_box_unchecked(&self, b: &Region) -> f64 {
        let mut total = 0.0;
        self.for_each_piece(b, |piece, w| total += w * piece.volume());
        total
    }

    pub fn check_inside(&self, b: &Region) -> Result<()> {
        if b.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: b.dim(),
            });
        }
        if self.universe.contains_region(b) {
            Ok(())
        } else {
            Err(Error::OutOfUniverse)
        }
    }
}

fn parse_csv_grid(text: &str) -> Result<DensityGrid> {
    // header `level,value`; one row per grid value, level repeated
    let mut level = None;
    let mut values = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || (i == 0 && line.starts_with("level")) {
            continue;
        }
        let mut parts = line.split(',');
        let (Some(l), Some(v)) = (parts.next(), parts.next()) else {
            return Err(Error::Config(format!("bad density row {}: `{line}`", i + 1)));
        };
        let l: u32 = l
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("bad level on row {}", i + 1)))?;
        if *level.get_or_insert(l) != l {
            return Err(Error::Config("inconsistent level column".into()));
        }
        values.push(
            v.trim()
                .parse()
                .map_err(|_| Error::Config(format!("bad value on row {}", i + 1)))?,
        );
    }
    Ok(DensityGrid {
        level: level.unwrap_or(0),
        values,
    })
}

pub fn measure_box(mu: &RadonMeasure, b: &Region) -> Result<MeasureValue> {
    mu.check_inside(b)?;
    Ok(MeasureValue::exact(mu.measure_box_unchecked(b)))
}

/// Lebesgue volume of a norm ball.
pub fn ball_volume(radius: f64, kind: NormKind, dim: usize) -> f64 {
    let side = 2.0 * radius;
    match (kind, dim) {
        (_, 1) => side,
        (NormKind::Inf, d) => side.powi(d as i32),
        (NormKind::One, d) => side.powi(d as i32) / (1..=d).product::<usize>() as f64,
        (NormKind::Two, 2) => std::f64::consts::PI * radius * radius,
        (NormKind::Two, 3) => 4.0 / 3.0 * std::f64::consts::PI * radius.powi(3),
        (NormKind::Two, d) => unreachable!("dimension {d} unsupported"),
    }
}

fn adaptive_measure(mu: &RadonMeasure, root: &Region, classify: impl Fn(&Region) -> Containment, tol: f64) -> Result<MeasureValue> {
    let r = integrate_over_set(
        root,
        1,
        classify,
        |b| {
            let m = mu.measure_box_unchecked(b);
            Ok((vec![m], m))
        },
        tol,
        DEFAULT_CELL_BUDGET,
    )?;
    Ok(MeasureValue {
        value: r.value[0],
        error_bound: r.error_bound,
    })
}

pub fn measure_morse_set(mu: &RadonMeasure, s: &MorseSet, tol: f64) -> Result<MeasureValue> {
    let bbox = s.bounding_box();
    mu.check_inside(&bbox)?;
    match &s.shape {
        Shape::Cube { .. } => measure_box(mu, &bbox),
        Shape::Ball { .. } if s.dim() == 1 => measure_box(mu, &bbox),
        Shape::Ball { norm: NormKind::Inf, .. } => measure_box(mu, &bbox),
        Shape::Ball { radius, norm } => match mu.uniform_on(&bbox) {
            Some(w) => Ok(MeasureValue::exact(w * ball_volume(*radius, *norm, s.dim()))),
            None => adaptive_measure(mu, &bbox, |b| s.classify(b), tol),
        },
        Shape::Star2D { .. } => adaptive_measure(mu, &bbox, |b| s.classify(b), tol),
    }
}

/// `μ(B(0, radius) ∩ universe)`.
pub fn ball_intersection_measure(mu: &RadonMeasure, radius: f64, kind: NormKind, tol: f64) -> Result<MeasureValue> {
    let u = mu.universe();
    let d = u.dim();
    let origin = Point::origin(d);
    if radius <= 0.0 || u.distance_to(&origin, kind) >= radius {
        return Ok(MeasureValue::exact(0.0));
    }
    if u.farthest_distance(&origin, kind) <= radius {
        return Ok(MeasureValue::exact(mu.total()));
    }
    let cube = Region::centered(&origin, radius);
    if d == 1 || kind == NormKind::Inf {
        let piece = cube.intersect(u).expect("ball meets the universe");
        return Ok(MeasureValue::exact(mu.measure_box_unchecked(&piece)));
    }
    if u.inner_distance(&origin) >= radius {
        if let Some(w) = mu.uniform_on(&cube) {
            return Ok(MeasureValue::exact(w * ball_volume(radius, kind, d)));
        }
    }
    let ball = MorseSet {
        tag: origin,
        shape: Shape::Ball { radius, norm: kind },
        lambda: 1.0,
        domain_norm: kind,
    };
    let root = cube.intersect(u).expect("ball meets the universe");
    adaptive_measure(mu, &root, |b| ball.classify(b), tol)
}

/// Upper bound on `μ(E_n ∩ universe)` with `E_n = B(0, n+1) ∖ B(0, n−2)` and
/// `B(0, r) = ∅` for `r ≤ 0`. Exact whenever the pieces have closed forms.
pub fn annulus_measure(mu: &RadonMeasure, n: u32, kind: NormKind) -> Result<f64> {
    let tol = 1e-4 * mu.total().max(1e-300);
    let outer = ball_intersection_measure(mu, n as f64 + 1.0, kind, tol)?;
    let inner = ball_intersection_measure(mu, n as f64 - 2.0, kind, tol)?;
    Ok((outer.upper() - inner.lower()).max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn unit_square() {
        let mu = RadonMeasure::lebesgue(Region::cube(2, 0.0, 1.0));
        assert_eq!(measure_box(&mu, &Region::cube(2, 0.0, 1.0)).unwrap(), MeasureValue::exact(1.0));
        assert!(matches!(
            measure_box(&mu, &Region::cube(2, 0.5, 1.5)),
            Err(Error::OutOfUniverse)
        ));
    }

    #[test]
    fn half_density() {
        let mu = RadonMeasure::from_grid(
            Region::cube(1, 0.0, 1.0),
            DensityGrid {
                level: 1,
                values: vec![2.0, 0.0],
            },
        )
        .unwrap();
        assert_eq!(measure_box(&mu, &Region::cube(1, 0.0, 1.0)).unwrap().value, 1.0);
        assert_eq!(measure_box(&mu, &Region::cube(1, 0.25, 0.75)).unwrap().value, 0.5);
        assert_eq!(mu.uniform_on(&Region::cube(1, 0.1, 0.4)), Some(2.0));
        assert_eq!(mu.uniform_on(&Region::cube(1, 0.4, 0.6)), None);
    }

    #[test]
    fn dyadic_additivity_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let level = 3;
        let values: Vec<f64> = (0..1 << (2 * level)).map(|_| rng.gen_range(0..64) as f64 / 16.0).collect();
        let mu = RadonMeasure::from_grid(Region::cube(2, 0.0, 1.0), DensityGrid { level, values }).unwrap();
        let mut boxes = vec![Region::cube(2, 0.0, 1.0)];
        for _ in 0..5 {
            let b = boxes[rng.gen_range(0..boxes.len())];
            let whole = measure_box(&mu, &b).unwrap().value;
            let kids: f64 = b.children().iter().map(|c| measure_box(&mu, c).unwrap().value).sum();
            assert_eq!(whole, kids);
            boxes.extend(b.children());
        }
    }

    #[test]
    fn ball_closed_forms() {
        let mu2 = RadonMeasure::lebesgue(Region::cube(2, -1.0, 1.0));
        let b = MorseSet::ball(Point::new(&[0.0, 0.0]), 0.5, NormKind::Two).unwrap();
        let m = measure_morse_set(&mu2, &b, 1e-6).unwrap();
        assert_eq!(m.value, std::f64::consts::PI / 4.0);
        assert_eq!(m.error_bound, 0.0);
        let mu1 = RadonMeasure::lebesgue(Region::cube(1, -1.0, 1.0));
        let b1 = MorseSet::ball(Point::new(&[0.0]), 0.5, NormKind::Two).unwrap();
        assert_eq!(measure_morse_set(&mu1, &b1, 1e-6).unwrap().value, 1.0);
    }

    #[test]
    fn annulus_examples() {
        let mu1 = RadonMeasure::lebesgue(Region::cube(1, -4.0, 4.0));
        assert_eq!(annulus_measure(&mu1, 1, NormKind::Two).unwrap(), 4.0);
        assert_eq!(annulus_measure(&mu1, 3, NormKind::Two).unwrap(), 6.0);
        let mu2 = RadonMeasure::lebesgue(Region::cube(2, -4.0, 4.0));
        assert!((annulus_measure(&mu2, 1, NormKind::Two).unwrap() - 4.0 * std::f64::consts::PI).abs() < 1e-12);
    }

    #[test]
    fn annulus_partial_overlap_is_conservative() {
        // E_3 ∩ [0,1]^2 = [0,1]^2 ∖ quarter disk, area 1 − π/4
        let mu = RadonMeasure::lebesgue(Region::cube(2, 0.0, 1.0));
        let a = annulus_measure(&mu, 3, NormKind::Two).unwrap();
        let exact = 1.0 - std::f64::consts::PI / 4.0;
        assert!(a >= exact && a <= exact + 3e-4, "{a}");
    }

    #[test]
    fn csv_grid_round_trip() {
        let g = parse_csv_grid("level,value\n1,0.5\n1,1.5\n").unwrap();
        assert_eq!(g.level, 1);
        assert_eq!(g.values, vec![0.5, 1.5]);
        assert!(parse_csv_grid("level,value\n1,0.5\n2,1.5\n").is_err());
    }
}
