//! Points, norms, axis-aligned regions and λ-Morse sets.
//!
//! A Morse set is a closed set `S` with a tag `a` and an inner radius `r` such
//! that `B(a, r) ⊆ S ⊆ B(a, λr)` and every segment from a point of `B(a, r)`
//! to a point of `S` stays in `S`. Cubes and norm balls are convex, so their
//! predicates are exact. Star-shaped planar polygons are checked by ray
//! crossing and sampled segment tests.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest supported ambient dimension.
pub const MAX_DIM: usize = 3;

/// Relative slack used when testing closed-set containment.
const CONTAIN_TOL: f64 = 1e-12;

/// A point of `R^d` with `d ∈ {1, 2, 3}`.
#[derive(Clone, Copy, PartialEq)]
pub struct Point {
    coords: [f64; MAX_DIM],
    dim: u8,
}

impl Point {
    pub fn new(coords: &[f64]) -> Point {
        assert!(
            (1..=MAX_DIM).contains(&coords.len()),
            "point dimension must be 1..=3, got {}",
            coords.len()
        );
        let mut c = [0.0; MAX_DIM];
        c[..coords.len()].copy_from_slice(coords);
        Point {
            coords: c,
            dim: coords.len() as u8,
        }
    }

    pub fn try_new(coords: &[f64]) -> Result<Point> {
        if !(1..=MAX_DIM).contains(&coords.len()) {
            return Err(Error::DimensionMismatch {
                expected: MAX_DIM,
                found: coords.len(),
            });
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::MalformedShape("non-finite coordinate".into()));
        }
        Ok(Point::new(coords))
    }

    pub fn origin(dim: usize) -> Point {
        Point::new(&vec![0.0; dim])
    }

    pub fn splat(dim: usize, v: f64) -> Point {
        Point::new(&vec![v; dim])
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim as usize
    }

    #[inline]
    pub fn coords(&self) -> &[f64] {
        &self.coords[..self.dim as usize]
    }

    #[inline]
    pub fn get(&self, k: usize) -> f64 {
        self.coords[k]
    }

    #[inline]
    pub fn set(&mut self, k: usize, v: f64) {
        self.coords[k] = v;
    }

    pub fn map2(&self, other: &Point, f: impl Fn(f64, f64) -> f64) -> Point {
        debug_assert_eq!(self.dim, other.dim);
        let mut out = *self;
        for k in 0..self.dim() {
            out.coords[k] = f(self.coords[k], other.coords[k]);
        }
        out
    }

    pub fn sub(&self, other: &Point) -> Point {
        self.map2(other, |a, b| a - b)
    }

    pub fn add(&self, other: &Point) -> Point {
        self.map2(other, |a, b| a + b)
    }

    pub fn scale(&self, s: f64) -> Point {
        let mut out = *self;
        for k in 0..self.dim() {
            out.coords[k] *= s;
        }
        out
    }

    /// `α·self + (1 − α)·other`
    pub fn lerp(&self, other: &Point, alpha: f64) -> Point {
        self.map2(other, |a, b| alpha * a + (1.0 - alpha) * b)
    }

    pub fn distance(&self, other: &Point, kind: NormKind) -> f64 {
        norm(&self.sub(other), kind)
    }

    pub fn is_finite(&self) -> bool {
        self.coords().iter().all(|c| c.is_finite())
    }
}

impl fmt::Debug for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.coords()).finish()
    }
}

impl Serialize for Point {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.coords().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Point {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v: Vec<f64> = Vec::deserialize(d)?;
        Point::try_new(&v).map_err(serde::de::Error::custom)
    }
}

/// The three p-norms the engine supports, on the domain and on the target.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NormKind {
    One,
    Two,
    Inf,
}

impl NormKind {
    pub fn parse(s: &str) -> Result<NormKind> {
        match s.to_ascii_lowercase().as_str() {
            "1" | "one" | "l1" => Ok(NormKind::One),
            "2" | "two" | "l2" => Ok(NormKind::Two),
            "inf" | "max" | "linf" => Ok(NormKind::Inf),
            other => Err(Error::Config(format!("unknown norm `{other}`"))),
        }
    }

    /// `1/p` for the norm, with `1/∞ = 0`.
    fn inv_p(self) -> f64 {
        match self {
            NormKind::One => 1.0,
            NormKind::Two => 0.5,
            NormKind::Inf => 0.0,
        }
    }
}

impl fmt::Display for NormKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NormKind::One => "1",
            NormKind::Two => "2",
            NormKind::Inf => "inf",
        })
    }
}

pub fn norm_of(v: &[f64], kind: NormKind) -> f64 {
    match kind {
        NormKind::One => v.iter().map(|c| c.abs()).sum(),
        NormKind::Two => v.iter().map(|c| c * c).sum::<f64>().sqrt(),
        NormKind::Inf => v.iter().fold(0.0, |m, c| m.max(c.abs())),
    }
}

pub fn norm(v: &Point, kind: NormKind) -> f64 {
    norm_of(v.coords(), kind)
}

/// `sup_{v ≠ 0} ‖v‖_to / ‖v‖_from` in `R^dim`.
pub fn norm_ratio(to: NormKind, from: NormKind, dim: usize) -> f64 {
    let e = to.inv_p() - from.inv_p();
    if e > 0.0 {
        (dim as f64).powf(e)
    } else {
        1.0
    }
}

/// Closed axis-aligned box `∏ [lo_k, hi_k]`.
#[derive(Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub lo: Point,
    pub hi: Point,
}

impl fmt::Debug for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Region({:?}..{:?})", self.lo, self.hi)
    }
}

impl Region {
    pub fn new(lo: Point, hi: Point) -> Result<Region> {
        if lo.dim() != hi.dim() {
            return Err(Error::DimensionMismatch {
                expected: lo.dim(),
                found: hi.dim(),
            });
        }
        if (0..lo.dim()).any(|k| !(lo.get(k) <= hi.get(k))) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::MalformedShape(format!(
                "box bounds out of order: {lo:?} .. {hi:?}"
            )));
        }
        Ok(Region { lo, hi })
    }

    /// `[lo, hi]^dim`
    pub fn cube(dim: usize, lo: f64, hi: f64) -> Region {
        Region {
            lo: Point::splat(dim, lo),
            hi: Point::splat(dim, hi),
        }
    }

    pub fn from_bounds(bounds: &[(f64, f64)]) -> Result<Region> {
        let lo: Vec<f64> = bounds.iter().map(|b| b.0).collect();
        let hi: Vec<f64> = bounds.iter().map(|b| b.1).collect();
        Region::new(Point::try_new(&lo)?, Point::try_new(&hi)?)
    }

    pub fn centered(center: &Point, half_side: f64) -> Region {
        Region {
            lo: center.map2(center, |c, _| c - half_side),
            hi: center.map2(center, |c, _| c + half_side),
        }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.lo.dim()
    }

    pub fn extent(&self, k: usize) -> f64 {
        self.hi.get(k) - self.lo.get(k)
    }

    pub fn volume(&self) -> f64 {
        (0..self.dim()).map(|k| self.extent(k)).product()
    }

    pub fn center(&self) -> Point {
        self.lo.lerp(&self.hi, 0.5)
    }

    pub fn is_degenerate(&self) -> bool {
        (0..self.dim()).any(|k| self.extent(k) <= 0.0)
    }

    pub fn contains(&self, x: &Point) -> bool {
        (0..self.dim()).all(|k| self.lo.get(k) <= x.get(k) && x.get(k) <= self.hi.get(k))
    }

    /// Containment with a slack proportional to the box size.
    pub fn contains_region_tol(&self, other: &Region, rel: f64) -> bool {
        (0..self.dim()).all(|k| {
            let tol = rel * self.extent(k).abs().max(1.0);
            other.lo.get(k) >= self.lo.get(k) - tol && other.hi.get(k) <= self.hi.get(k) + tol
        })
    }

    pub fn contains_region(&self, other: &Region) -> bool {
        self.contains_region_tol(other, CONTAIN_TOL)
    }

    pub fn intersect(&self, other: &Region) -> Option<Region> {
        let lo = self.lo.map2(&other.lo, f64::max);
        let hi = self.hi.map2(&other.hi, f64::min);
        if (0..self.dim()).all(|k| lo.get(k) <= hi.get(k)) {
            Some(Region { lo, hi })
        } else {
            None
        }
    }

    /// True when the interiors of the two boxes meet by more than `tol` on every axis.
    pub fn interiors_overlap(&self, other: &Region, tol: f64) -> bool {
        (0..self.dim()).all(|k| {
            let lo = self.lo.get(k).max(other.lo.get(k));
            let hi = self.hi.get(k).min(other.hi.get(k));
            hi - lo > tol
        })
    }

    /// Distance from `x` to the box (zero inside).
    pub fn distance_to(&self, x: &Point, kind: NormKind) -> f64 {
        let mut d = *x;
        for k in 0..self.dim() {
            let c = x.get(k);
            let v = if c < self.lo.get(k) {
                self.lo.get(k) - c
            } else if c > self.hi.get(k) {
                c - self.hi.get(k)
            } else {
                0.0
            };
            d.set(k, v);
        }
        norm(&d, kind)
    }

    /// The box enlarged by `w` on every side.
    pub fn grown(&self, w: f64) -> Region {
        Region {
            lo: self.lo.map2(&self.lo, |a, _| a - w),
            hi: self.hi.map2(&self.hi, |a, _| a + w),
        }
    }

    /// Largest `s` with `B(x, s) ⊆ self` for any p-norm (a norm ball of
    /// radius `s` reaches exactly `s` along each axis). Zero outside.
    pub fn inner_distance(&self, x: &Point) -> f64 {
        (0..self.dim())
            .map(|k| (x.get(k) - self.lo.get(k)).min(self.hi.get(k) - x.get(k)))
            .fold(f64::INFINITY, f64::min)
            .max(0.0)
    }

    /// Distance from `x` to the farthest corner of the box.
    pub fn farthest_distance(&self, x: &Point, kind: NormKind) -> f64 {
        let mut d = *x;
        for k in 0..self.dim() {
            let v = (x.get(k) - self.lo.get(k)).abs().max((self.hi.get(k) - x.get(k)).abs());
            d.set(k, v);
        }
        norm(&d, kind)
    }

    pub fn diameter(&self, kind: NormKind) -> f64 {
        self.hi.distance(&self.lo, kind)
    }

    /// The `2^d` children of a dyadic split, in lexicographic order with
    /// axis 0 most significant.
    pub fn children(&self) -> Vec<Region> {
        let d = self.dim();
        let mid = self.center();
        (0..1usize << d)
            .map(|digit| {
                let mut lo = self.lo;
                let mut hi = self.hi;
                for k in 0..d {
                    if digit >> (d - 1 - k) & 1 == 1 {
                        lo.set(k, mid.get(k));
                    } else {
                        hi.set(k, mid.get(k));
                    }
                }
                Region { lo, hi }
            })
            .collect()
    }

    pub fn corners(&self) -> impl Iterator<Item = Point> + '_ {
        let d = self.dim();
        (0..1usize << d).map(move |mask| {
            let mut p = self.lo;
            for k in 0..d {
                if mask >> k & 1 == 1 {
                    p.set(k, self.hi.get(k));
                }
            }
            p
        })
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> Point {
        let mut p = self.lo;
        for k in 0..self.dim() {
            let (a, b) = (self.lo.get(k), self.hi.get(k));
            p.set(k, if b > a { rng.gen_range(a..=b) } else { a });
        }
        p
    }

    pub fn is_cube(&self, rel: f64) -> bool {
        let e0 = self.extent(0);
        (1..self.dim()).all(|k| (self.extent(k) - e0).abs() <= rel * e0.abs().max(1e-300))
    }
}

/// Shape of a Morse set about its tag.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape_kind", rename_all = "snake_case")]
pub enum Shape {
    /// Axis-aligned cube `tag + [−h, h]^d`.
    Cube { half_side: f64 },
    /// Closed ball of the given norm.
    Ball { radius: f64, norm: NormKind },
    /// Planar polygon, vertices in counter-clockwise or clockwise order.
    Star2D {
        inner_radius: f64,
        vertices: Arc<[Point]>,
    },
}

/// A tagged λ-regular starlike set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MorseSet {
    pub tag: Point,
    #[serde(flatten)]
    pub shape: Shape,
    /// Regularity constant under `domain_norm`, cached at construction.
    pub lambda: f64,
    pub domain_norm: NormKind,
}

impl MorseSet {
    pub fn cube(tag: Point, half_side: f64, domain_norm: NormKind) -> Result<MorseSet> {
        Self::build(tag, Shape::Cube { half_side }, domain_norm)
    }

    pub fn ball(tag: Point, radius: f64, domain_norm: NormKind) -> Result<MorseSet> {
        Self::build(
            tag,
            Shape::Ball {
                radius,
                norm: domain_norm,
            },
            domain_norm,
        )
    }

    pub fn star2d(
        tag: Point,
        inner_radius: f64,
        vertices: Vec<Point>,
        domain_norm: NormKind,
    ) -> Result<MorseSet> {
        Self::build(
            tag,
            Shape::Star2D {
                inner_radius,
                vertices: vertices.into(),
            },
            domain_norm,
        )
    }

    /// Dyadic-cell constructor; skips the validation of `build`.
    pub(crate) fn cube_unchecked(tag: Point, half_side: f64, domain_norm: NormKind) -> MorseSet {
        let lambda = norm_ratio(domain_norm, NormKind::Inf, tag.dim())
            / norm_ratio(NormKind::Inf, domain_norm, tag.dim());
        MorseSet {
            tag,
            shape: Shape::Cube { half_side },
            lambda,
            domain_norm,
        }
    }

    fn build(tag: Point, shape: Shape, domain_norm: NormKind) -> Result<MorseSet> {
        let mut s = MorseSet {
            tag,
            shape,
            lambda: 1.0,
            domain_norm,
        };
        s.lambda = min_lambda(&s, domain_norm)?;
        Ok(s)
    }

    pub fn dim(&self) -> usize {
        self.tag.dim()
    }

    /// Declared inner radius measured in the set's own shape terms.
    pub fn inner_radius(&self) -> f64 {
        match &self.shape {
            Shape::Cube { half_side } => *half_side,
            Shape::Ball { radius, .. } => *radius,
            Shape::Star2D { inner_radius, .. } => *inner_radius,
        }
    }

    /// Largest `s` with `B_N(tag, s) ⊆ S`, as implied by the declared radius.
    pub fn declared_inner_radius(&self, domain_norm: NormKind) -> f64 {
        match &self.shape {
            // a p-ball of radius h reaches exactly h along each axis
            Shape::Cube { half_side } => *half_side,
            Shape::Ball { radius, norm } => radius / norm_ratio(*norm, domain_norm, self.dim()),
            Shape::Star2D { inner_radius, .. } => *inner_radius,
        }
    }

    pub fn bounding_box(&self) -> Region {
        match &self.shape {
            Shape::Cube { half_side } => Region::centered(&self.tag, *half_side),
            Shape::Ball { radius, .. } => Region::centered(&self.tag, *radius),
            Shape::Star2D { vertices, .. } => {
                let mut lo = vertices[0];
                let mut hi = vertices[0];
                for v in vertices.iter() {
                    lo = lo.map2(v, f64::min);
                    hi = hi.map2(v, f64::max);
                }
                Region { lo, hi }
            }
        }
    }

    /// `sup_{y ∈ S} ‖y − p‖` in `kind`.
    pub fn reach_from(&self, p: &Point, kind: NormKind) -> f64 {
        match &self.shape {
            Shape::Cube { half_side } => Region::centered(&self.tag, *half_side).farthest_distance(p, kind),
            Shape::Ball { radius, norm } => {
                if p == &self.tag {
                    radius * norm_ratio(kind, *norm, self.dim())
                } else {
                    // exact when the ball norm equals `kind`, an upper bound otherwise
                    self.tag.distance(p, kind) + radius * norm_ratio(kind, *norm, self.dim())
                }
            }
            Shape::Star2D { vertices, .. } => vertices
                .iter()
                .map(|v| v.distance(p, kind))
                .fold(0.0, f64::max),
        }
    }

    /// Circumradius about the tag.
    pub fn circumradius(&self, kind: NormKind) -> f64 {
        self.reach_from(&self.tag, kind)
    }

    pub fn contains(&self, x: &Point) -> bool {
        match &self.shape {
            Shape::Cube { half_side } => {
                let tol = CONTAIN_TOL * half_side.max(1.0);
                (0..self.dim()).all(|k| (x.get(k) - self.tag.get(k)).abs() <= half_side + tol)
            }
            Shape::Ball { radius, norm } => {
                self.tag.distance(x, *norm) <= radius * (1.0 + CONTAIN_TOL)
            }
            Shape::Star2D { vertices, .. } => polygon_contains(vertices, x),
        }
    }

    /// Homothety about the tag by `p ∈ (0, 1]`.
    pub fn scaled(&self, p: f64) -> Result<MorseSet> {
        scale_morse_set(self, p)
    }

    /// Copy of the set translated so that its tag sits at `to`.
    pub fn translated(&self, to: Point) -> MorseSet {
        let shift = to.sub(&self.tag);
        let shape = match &self.shape {
            Shape::Star2D {
                inner_radius,
                vertices,
            } => Shape::Star2D {
                inner_radius: *inner_radius,
                vertices: vertices.iter().map(|v| v.add(&shift)).collect::<Vec<_>>().into(),
            },
            other => other.clone(),
        };
        MorseSet {
            tag: to,
            shape,
            lambda: self.lambda,
            domain_norm: self.domain_norm,
        }
    }

    /// Classify an axis-aligned box against this set.
    pub fn classify(&self, b: &Region) -> Containment {
        match &self.shape {
            Shape::Cube { half_side } => {
                let c = Region::centered(&self.tag, *half_side);
                if c.contains_region_tol(b, 0.0) {
                    Containment::Inside
                } else if !c.interiors_overlap(b, 0.0) {
                    Containment::Outside
                } else {
                    Containment::Boundary
                }
            }
            Shape::Ball { radius, norm } => {
                if b.distance_to(&self.tag, *norm) >= *radius {
                    Containment::Outside
                } else if b.farthest_distance(&self.tag, *norm) <= *radius {
                    Containment::Inside
                } else {
                    Containment::Boundary
                }
            }
            Shape::Star2D { vertices, .. } => classify_polygon(vertices, b),
        }
    }
}

/// Relation of a box to a set.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Containment {
    Inside,
    Outside,
    Boundary,
}

pub fn min_lambda(s: &MorseSet, domain_norm: NormKind) -> Result<f64> {
    let d = s.dim();
    match &s.shape {
        Shape::Cube { half_side } => {
            if !(*half_side > 0.0 && half_side.is_finite()) {
                return Err(Error::MalformedShape(format!("cube half side {half_side}")));
            }
            Ok(norm_ratio(domain_norm, NormKind::Inf, d) / norm_ratio(NormKind::Inf, domain_norm, d))
        }
        Shape::Ball { radius, norm } => {
            if !(*radius > 0.0 && radius.is_finite()) {
                return Err(Error::MalformedShape(format!("ball radius {radius}")));
            }
            // outer: r·c(N←M); inner: r / c(M←N)
            Ok(norm_ratio(domain_norm, *norm, d) * norm_ratio(*norm, domain_norm, d))
        }
        Shape::Star2D {
            inner_radius,
            vertices,
        } => {
            if d != 2 {
                return Err(Error::MalformedShape("star polygons are planar".into()));
            }
            if vertices.len() < 3 || vertices.iter().any(|v| v.dim() != 2 || !v.is_finite()) {
                return Err(Error::MalformedShape("star polygon needs ≥ 3 planar vertices".into()));
            }
            if !(*inner_radius > 0.0) {
                return Err(Error::MalformedShape(format!("inner radius {inner_radius}")));
            }
            if !polygon_contains(vertices, &s.tag) {
                return Err(Error::MalformedShape("tag outside polygon".into()));
            }
            let boundary = polygon_boundary_distance(vertices, &s.tag, domain_norm);
            if boundary < inner_radius * (1.0 - 1e-9) {
                return Err(Error::MalformedShape(format!(
                    "inner ball of radius {inner_radius} leaves the polygon (boundary at {boundary})"
                )));
            }
            let outer = vertices
                .iter()
                .map(|v| v.distance(&s.tag, domain_norm))
                .fold(0.0, f64::max);
            Ok((outer / inner_radius).max(1.0))
        }
    }
}

pub fn is_delta_fine(s: &MorseSet, g: &Gauge, domain_norm: NormKind) -> Result<bool> {
    Ok(s.circumradius(domain_norm) <= g.eval(&s.tag)?)
}

pub fn scale_morse_set(s: &MorseSet, p: f64) -> Result<MorseSet> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::BadScale(p));
    }
    let shape = match &s.shape {
        Shape::Cube { half_side } => Shape::Cube {
            half_side: half_side * p,
        },
        Shape::Ball { radius, norm } => Shape::Ball {
            radius: radius * p,
            norm: *norm,
        },
        Shape::Star2D {
            inner_radius,
            vertices,
        } => Shape::Star2D {
            inner_radius: inner_radius * p,
            vertices: vertices
                .iter()
                .map(|v| s.tag.add(&v.sub(&s.tag).scale(p)))
                .collect::<Vec<_>>()
                .into(),
        },
    };
    Ok(MorseSet {
        tag: s.tag,
        shape,
        lambda: s.lambda,
        domain_norm: s.domain_norm,
    })
}

/// Sampled starlikeness certificate. Convex shapes return `true` without sampling.
pub fn starlike_check(s: &MorseSet, n_samples: usize) -> bool {
    starlike_check_seeded(s, n_samples, 0x5eed)
}

pub fn starlike_check_seeded(s: &MorseSet, n_samples: usize, seed: u64) -> bool {
    let vertices = match &s.shape {
        Shape::Cube { .. } | Shape::Ball { .. } => return true,
        Shape::Star2D { vertices, .. } => vertices,
    };
    let r = s.declared_inner_radius(s.domain_norm);
    let inner = MorseSet {
        tag: s.tag,
        shape: Shape::Ball {
            radius: r,
            norm: s.domain_norm,
        },
        lambda: 1.0,
        domain_norm: s.domain_norm,
    };
    let n = n_samples.max(1);
    let segment_ok = |y: &Point, x: &Point| -> bool {
        const STEPS: usize = 16;
        (0..=STEPS).all(|j| s.contains(&y.lerp(x, j as f64 / STEPS as f64)))
    };

    // structured probes: rim of the inner ball against every vertex
    let rim: Vec<Point> = (0..32)
        .map(|j| {
            let t = j as f64 / 32.0 * std::f64::consts::TAU;
            let dir = Point::new(&[t.cos(), t.sin()]);
            let len = norm(&dir, s.domain_norm);
            s.tag.add(&dir.scale(r / len))
        })
        .collect();
    for y in &rim {
        if !s.contains(y) {
            return false;
        }
        if !vertices.iter().all(|v| segment_ok(y, v)) {
            return false;
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let inner_box = inner.bounding_box();
    let outer_box = s.bounding_box();
    let mut checked = 0;
    let mut attempts = 0;
    while checked < n && attempts < 64 * n {
        attempts += 1;
        let y = inner_box.sample(&mut rng);
        if !inner.contains(&y) {
            continue;
        }
        let x = if rng.gen_bool(0.25) {
            vertices[rng.gen_range(0..vertices.len())]
        } else {
            let x = outer_box.sample(&mut rng);
            if !s.contains(&x) {
                continue;
            }
            x
        };
        checked += 1;
        if !s.contains(&y) || !segment_ok(&y, &x) {
            return false;
        }
    }
    true
}

fn on_segment(p: &Point, a: &Point, b: &Point, tol: f64) -> bool {
    let (ax, ay, bx, by) = (a.get(0), a.get(1), b.get(0), b.get(1));
    let (px, py) = (p.get(0), p.get(1));
    let cross = (bx - ax) * (py - ay) - (by - ay) * (px - ax);
    let len = ((bx - ax).powi(2) + (by - ay).powi(2)).sqrt();
    if cross.abs() > tol * len.max(1.0) {
        return false;
    }
    px >= ax.min(bx) - tol && px <= ax.max(bx) + tol && py >= ay.min(by) - tol && py <= ay.max(by) + tol
}

/// Closed even-odd containment for a simple polygon.
pub fn polygon_contains(vertices: &[Point], p: &Point) -> bool {
    let n = vertices.len();
    let scale = vertices
        .iter()
        .map(|v| v.get(0).abs().max(v.get(1).abs()))
        .fold(1.0, f64::max);
    let tol = 1e-12 * scale;
    let mut inside = false;
    let (px, py) = (p.get(0), p.get(1));
    for i in 0..n {
        let a = &vertices[i];
        let b = &vertices[(i + 1) % n];
        if on_segment(p, a, b, tol) {
            return true;
        }
        let (ax, ay, bx, by) = (a.get(0), a.get(1), b.get(0), b.get(1));
        if (ay > py) != (by > py) {
            let xint = ax + (py - ay) * (bx - ax) / (by - ay);
            if px < xint {
                inside = !inside;
            }
        }
    }
    inside
}

/// Distance from `p` to the segment `[a, b]` in a p-norm. The objective is
/// convex and piecewise linear for ONE/INF, so checking breakpoints is exact.
pub fn segment_distance(p: &Point, a: &Point, b: &Point, kind: NormKind) -> f64 {
    let dir = b.sub(a);
    let off = p.sub(a);
    let at = |t: f64| -> f64 { norm(&off.sub(&dir.scale(t)), kind) };
    match kind {
        NormKind::Two => {
            let len2: f64 = dir.coords().iter().map(|c| c * c).sum();
            let t = if len2 > 0.0 {
                (off.coords().iter().zip(dir.coords()).map(|(o, d)| o * d).sum::<f64>() / len2).clamp(0.0, 1.0)
            } else {
                0.0
            };
            at(t)
        }
        _ => {
            let d = p.dim();
            let mut ts = vec![0.0, 1.0];
            for k in 0..d {
                if dir.get(k) != 0.0 {
                    ts.push(off.get(k) / dir.get(k));
                }
                for j in (k + 1)..d {
                    for sign in [1.0, -1.0] {
                        // off_k − t dir_k = sign (off_j − t dir_j)
                        let den = dir.get(k) - sign * dir.get(j);
                        if den != 0.0 {
                            ts.push((off.get(k) - sign * off.get(j)) / den);
                        }
                    }
                }
            }
            ts.into_iter()
                .filter(|t| (0.0..=1.0).contains(t))
                .map(at)
                .fold(f64::INFINITY, f64::min)
        }
    }
}

pub fn polygon_boundary_distance(vertices: &[Point], p: &Point, kind: NormKind) -> f64 {
    let n = vertices.len();
    (0..n)
        .map(|i| segment_distance(p, &vertices[i], &vertices[(i + 1) % n], kind))
        .fold(f64::INFINITY, f64::min)
}

/// Liang–Barsky clip of segment `[a, b]` against a closed box.
fn segment_hits_box(a: &Point, b: &Point, bx: &Region) -> bool {
    let mut t0: f64 = 0.0;
    let mut t1: f64 = 1.0;
    for k in 0..2 {
        let d = b.get(k) - a.get(k);
        let (lo, hi) = (bx.lo.get(k) - a.get(k), bx.hi.get(k) - a.get(k));
        if d == 0.0 {
            if lo > 0.0 || hi < 0.0 {
                return false;
            }
        } else {
            let (mut ta, mut tb) = (lo / d, hi / d);
            if ta > tb {
                std::mem::swap(&mut ta, &mut tb);
            }
            t0 = t0.max(ta);
            t1 = t1.min(tb);
            if t0 > t1 {
                return false;
            }
        }
    }
    true
}

fn classify_polygon(vertices: &[Point], b: &Region) -> Containment {
    let n = vertices.len();
    let crosses = (0..n).any(|i| segment_hits_box(&vertices[i], &vertices[(i + 1) % n], b));
    if crosses {
        return Containment::Boundary;
    }
    // no edge meets the box: it is entirely inside or entirely outside
    if polygon_contains(vertices, &b.center()) {
        Containment::Inside
    } else {
        Containment::Outside
    }
}

/// Provenance attached to a gauge: how it was built and with which budgets.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct GaugeProvenance {
    pub kind: String,
    pub eps: Option<f64>,
    pub gamma: Option<f64>,
    /// `(n, ε_n)` per spatial shell.
    pub shell_budgets: Vec<(u32, f64)>,
    pub tubes: Vec<crate::gauge::NullTube>,
    pub notes: Vec<String>,
}

type DeltaFn = dyn Fn(&Point) -> Result<f64> + Send + Sync;

/// A strictly positive function `δ: X → (0, 1]`.
#[derive(Clone)]
pub struct Gauge {
    delta: Arc<DeltaFn>,
    pub provenance: GaugeProvenance,
}

impl fmt::Debug for Gauge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Gauge").field("provenance", &self.provenance).finish()
    }
}

impl Gauge {
    pub fn constant(value: f64) -> Result<Gauge> {
        if !(value > 0.0 && value <= 1.0) {
            return Err(Error::Config(format!("gauge value {value} outside (0, 1]")));
        }
        Ok(Gauge {
            delta: Arc::new(move |_| Ok(value)),
            provenance: GaugeProvenance {
                kind: format!("constant {value}"),
                ..Default::default()
            },
        })
    }

    /// Wrap an arbitrary function. Values are checked on every query.
    pub fn from_fn<F>(f: F, provenance: GaugeProvenance) -> Gauge
    where
        F: Fn(&Point) -> Result<f64> + Send + Sync + 'static,
    {
        Gauge {
            delta: Arc::new(f),
            provenance,
        }
    }

    pub fn eval(&self, x: &Point) -> Result<f64> {
        let v = (self.delta)(x)?;
        if !(v > 0.0 && v <= 1.0) {
            return Err(Error::GaugeOutOfRange { at: *x, value: v });
        }
        Ok(v)
    }

    /// `min(1, factor·δ)`; used by the falsification hooks.
    pub fn inflated(&self, factor: f64) -> Gauge {
        let inner = self.delta.clone();
        let mut provenance = self.provenance.clone();
        provenance.notes.push(format!("inflated by {factor}"));
        Gauge {
            delta: Arc::new(move |x| Ok((inner(x)? * factor).min(1.0))),
            provenance,
        }
    }
}
