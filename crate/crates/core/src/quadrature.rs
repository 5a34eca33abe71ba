//! Certified cubature on boxes.
//!
//! Two adaptive schemes, both returning an explicit error bound:
//!
//! * [`integrate_over_set`] integrates an exactly-integrable box functional over
//!   a set known only through a box classifier. Boxes fully inside contribute
//!   exactly; boundary boxes contribute half their value with half their
//!   absolute mass as error.
//! * [`lipschitz_cubature`] integrates a scalar Lipschitz function with the
//!   midpoint rule, bounding each cell's error by `L · reach · vol`.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};
use crate::geometry::{Containment, NormKind, Region};

/// Default cap on the number of live cells in an adaptive run.
pub const DEFAULT_CELL_BUDGET: usize = 1 << 20;

#[derive(Clone, Debug, PartialEq)]
pub struct SetIntegral {
    pub value: Vec<f64>,
    pub error_bound: f64,
    pub cells: usize,
}

struct Pending {
    key: f64,
    region: Region,
    value: Vec<f64>,
}

impl PartialEq for Pending {
    fn eq(&self, other: &Self) -> bool {
        self.key.total_cmp(&other.key) == Ordering::Equal
    }
}
impl Eq for Pending {}
impl PartialOrd for Pending {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Pending {
    fn cmp(&self, other: &Self) -> Ordering {
        self.key.total_cmp(&other.key)
    }
}

fn add_into(acc: &mut [f64], v: &[f64], scale: f64) {
    for (a, b) in acc.iter_mut().zip(v) {
        *a += scale * b;
    }
}

/// Integrate `box_term` over the set described by `classify`, restricted to `root`.
///
/// `box_term(b)` must return the exact integral over `b` together with an
/// upper bound on the integral of its norm over `b`.
pub fn integrate_over_set<C, F>(
    root: &Region,
    width: usize,
    classify: C,
    box_term: F,
    tol: f64,
    max_cells: usize,
) -> Result<SetIntegral>
where
    C: Fn(&Region) -> Containment,
    F: Fn(&Region) -> Result<(Vec<f64>, f64)>,
{
    let mut inside = vec![0.0; width];
    let mut heap = BinaryHeap::new();
    let mut visited = 1usize;
    match classify(root) {
        Containment::Outside => {
            return Ok(SetIntegral {
                value: inside,
                error_bound: 0.0,
                cells: 1,
            })
        }
        Containment::Inside => {
            let (v, _) = box_term(root)?;
            return Ok(SetIntegral {
                value: v,
                error_bound: 0.0,
                cells: 1,
            });
        }
        Containment::Boundary => {
            let (v, a) = box_term(root)?;
            heap.push(Pending {
                key: a,
                region: *root,
                value: v,
            });
        }
    }
    let mut err: f64 = heap.iter().map(|p| 0.5 * p.key).sum();
    while err > tol {
        let Some(top) = heap.pop() else { break };
        if heap.len() + visited > max_cells {
            return Err(Error::ToleranceUnreachable { tol, reached: err });
        }
        err -= 0.5 * top.key;
        for child in top.region.children() {
            visited += 1;
            match classify(&child) {
                Containment::Outside => {}
                Containment::Inside => {
                    let (v, _) = box_term(&child)?;
                    add_into(&mut inside, &v, 1.0);
                }
                Containment::Boundary => {
                    let (v, a) = box_term(&child)?;
                    err += 0.5 * a;
                    heap.push(Pending {
                        key: a,
                        region: child,
                        value: v,
                    });
                }
            }
        }
    }
    let mut value = inside;
    let mut error_bound = 0.0;
    for p in heap.iter() {
        add_into(&mut value, &p.value, 0.5);
        error_bound += 0.5 * p.key;
    }
    Ok(SetIntegral {
        value,
        error_bound,
        cells: visited,
    })
}

/// Midpoint cubature of a scalar function with Lipschitz constant `lipschitz`
/// (with respect to `norm`) over `b`. At least `min_levels` uniform splits are
/// made before adaptive refinement.
pub fn lipschitz_cubature<G>(
    b: &Region,
    g: G,
    lipschitz: f64,
    norm: NormKind,
    tol: f64,
    min_levels: u32,
    max_cells: usize,
) -> Result<(f64, f64)>
where
    G: Fn(&crate::geometry::Point) -> f64,
{
    let cell = |r: &Region| -> Pending {
        let c = r.center();
        let vol = r.volume();
        Pending {
            key: lipschitz * r.farthest_distance(&c, norm) * vol,
            region: *r,
            value: vec![g(&c) * vol],
        }
    };
    let mut level = vec![*b];
    for _ in 0..min_levels {
        level = level.iter().flat_map(|r| r.children()).collect();
    }
    let mut heap: BinaryHeap<Pending> = level.iter().map(cell).collect();
    let mut err: f64 = heap.iter().map(|p| p.key).sum();
    while err > tol {
        if heap.len() > max_cells {
            return Err(Error::ToleranceUnreachable { tol, reached: err });
        }
        let top = heap.pop().expect("non-empty while error is positive");
        err -= top.key;
        for child in top.region.children() {
            let p = cell(&child);
            err += p.key;
            heap.push(p);
        }
    }
    let value = heap.iter().map(|p| p.value[0]).sum();
    let error_bound = heap.iter().map(|p| p.key).sum();
    Ok((value, error_bound))
}

/// Cubature of a function that is convex along every coordinate axis (for
/// instance `‖F‖` with `F` affine in each variable separately).
///
/// On such a function the midpoint value is a lower bound and the corner
/// average an upper bound for the cell mean, so each cell carries a bracket
/// whose half-width shrinks quadratically under refinement.
pub fn convex_bracket_cubature<G>(b: &Region, g: G, tol: f64, max_cells: usize) -> Result<(f64, f64)>
where
    G: Fn(&crate::geometry::Point) -> f64,
{
    let cell = |r: &Region| -> Pending {
        let vol = r.volume();
        let lo = g(&r.center());
        let n = 1usize << r.dim();
        let hi = r.corners().map(|c| g(&c)).sum::<f64>() / n as f64;
        let half = 0.5 * (hi - lo).max(0.0) * vol;
        Pending {
            key: half,
            region: *r,
            value: vec![0.5 * (lo + hi) * vol],
        }
    };
    let mut heap: BinaryHeap<Pending> = BinaryHeap::new();
    heap.push(cell(b));
    let mut err: f64 = heap.iter().map(|p| p.key).sum();
    while err > tol {
        if heap.len() > max_cells {
            return Err(Error::ToleranceUnreachable { tol, reached: err });
        }
        let top = heap.pop().expect("non-empty while error is positive");
        err -= top.key;
        for child in bisect_longest(&top.region) {
            let p = cell(&child);
            err += p.key;
            heap.push(p);
        }
    }
    let value = heap.iter().map(|p| p.value[0]).sum();
    let error_bound = heap.iter().map(|p| p.key).sum();
    Ok((value, error_bound))
}

/// Halve `r` across its longest axis, so thin slabs are not over-refined
/// along their short side.
fn bisect_longest(r: &Region) -> [Region; 2] {
    let k = (0..r.dim())
        .max_by(|&a, &b| r.extent(a).total_cmp(&r.extent(b)))
        .unwrap_or(0);
    let mid = 0.5 * (r.lo.get(k) + r.hi.get(k));
    let mut left = *r;
    let mut right = *r;
    left.hi.set(k, mid);
    right.lo.set(k, mid);
    [left, right]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{MorseSet, Point};

    #[test]
    fn disk_area_within_bound() {
        let disk = MorseSet::ball(Point::new(&[0.0, 0.0]), 0.5, NormKind::Two).unwrap();
        let root = disk.bounding_box();
        let r = integrate_over_set(
            &root,
            1,
            |b| disk.classify(b),
            |b| Ok((vec![b.volume()], b.volume())),
            1e-4,
            DEFAULT_CELL_BUDGET,
        )
        .unwrap();
        let exact = std::f64::consts::PI * 0.25;
        assert!(r.error_bound <= 1e-4);
        assert!((r.value[0] - exact).abs() <= r.error_bound, "{} vs {exact}", r.value[0]);
    }

    #[test]
    fn budget_exhaustion_is_reported() {
        let disk = MorseSet::ball(Point::new(&[0.0, 0.0]), 0.5, NormKind::Two).unwrap();
        let r = integrate_over_set(
            &disk.bounding_box(),
            1,
            |b| disk.classify(b),
            |b| Ok((vec![b.volume()], b.volume())),
            1e-12,
            1000,
        );
        assert!(matches!(r, Err(Error::ToleranceUnreachable { .. })));
    }

    #[test]
    fn lipschitz_cubature_of_abs_linear() {
        // ∫_0^1 |x − 0.3| dx = (0.09 + 0.49) / 2
        let b = Region::cube(1, 0.0, 1.0);
        let (v, e) = lipschitz_cubature(&b, |p| (p.get(0) - 0.3).abs(), 1.0, NormKind::Two, 1e-6, 2, 1 << 22).unwrap();
        assert!(e <= 1e-6);
        assert!((v - 0.29).abs() <= e);
    }

    #[test]
    fn convex_bracket_of_euclidean_norm() {
        // ∫∫_{[0,1]²} (x² + y²) dx dy = 2/3 (convex in each variable)
        let b = Region::cube(2, 0.0, 1.0);
        let (v, e) = convex_bracket_cubature(&b, |p| p.get(0).powi(2) + p.get(1).powi(2), 1e-6, 1 << 22).unwrap();
        assert!(e <= 1e-6);
        assert!((v - 2.0 / 3.0).abs() <= e + 1e-15);
    }
}
