use crate::error::{Error, Result};
use crate::geometry::{NormKind, Point, Region};
use crate::measure::MeasureValue;

use super::{meets_shell, ContinuityPiece, CorpusFunction, Discontinuity, Regularity, VectorValue};

/// A function constant on each of finitely many half-open boxes tiling the
/// universe. A box owns its lower faces, plus its upper faces where they lie
/// on the universe boundary, so every jump takes the value from the side above.
#[derive(Clone, Debug)]
pub struct PiecewiseConstant {
    name: String,
    universe: Region,
    y_norm: NormKind,
    pieces: Vec<(Region, VectorValue)>,
    overrides: Vec<(Point, VectorValue)>,
    discontinuities: Vec<Discontinuity>,
}

impl PiecewiseConstant {
    pub fn new(
        name: &str,
        universe: Region,
        y_norm: NormKind,
        pieces: Vec<(Region, VectorValue)>,
        overrides: Vec<(Point, VectorValue)>,
    ) -> Result<PiecewiseConstant> {
        if pieces.is_empty() {
            return Err(Error::Config(format!("{name}: no pieces")));
        }
        let total: f64 = pieces.iter().map(|(r, _)| r.volume()).sum();
        if (total - universe.volume()).abs() > 1e-12 * universe.volume() {
            return Err(Error::Config(format!("{name}: pieces do not tile the universe")));
        }
        let mut f = PiecewiseConstant {
            name: name.to_string(),
            universe,
            y_norm,
            pieces,
            overrides,
            discontinuities: Vec::new(),
        };
        f.discontinuities = f.shared_faces();
        Ok(f)
    }

    /// Faces between neighbouring pieces that carry different values.
    fn shared_faces(&self) -> Vec<Discontinuity> {
        let d = self.universe.dim();
        let mut out = Vec::new();
        for (i, (a, va)) in self.pieces.iter().enumerate() {
            for (b, vb) in &self.pieces[i + 1..] {
                if va == vb {
                    continue;
                }
                for k in 0..d {
                    let touching = a.hi.get(k) == b.lo.get(k) || b.hi.get(k) == a.lo.get(k);
                    if !touching {
                        continue;
                    }
                    let at = if a.hi.get(k) == b.lo.get(k) { a.hi.get(k) } else { a.lo.get(k) };
                    let mut lo = a.lo.map2(&b.lo, f64::max);
                    let mut hi = a.hi.map2(&b.hi, f64::min);
                    lo.set(k, at);
                    hi.set(k, at);
                    if (0..d).any(|j| hi.get(j) < lo.get(j)) {
                        continue;
                    }
                    let face = Region { lo, hi };
                    let mut norms = [va.norm(), vb.norm()];
                    for (p, v) in &self.overrides {
                        if face.contains(p) {
                            norms = [norms[0].min(v.norm()), norms[1].max(v.norm())];
                        }
                    }
                    out.push(Discontinuity {
                        region: face,
                        value_norms: (norms[0].min(norms[1]), norms[0].max(norms[1])),
                    });
                }
            }
        }
        out
    }

    /// `f ≡ c` on `[0,1]^dim`.
    pub fn constant(dim: usize, c: &[f64], y_norm: NormKind) -> Result<PiecewiseConstant> {
        if !(1..=crate::geometry::MAX_DIM).contains(&dim) {
            return Err(Error::Config(format!("constant: dimension {dim} not in 1..=3")));
        }
        let u = Region::cube(dim, 0.0, 1.0);
        PiecewiseConstant::new("constant", u, y_norm, vec![(u, VectorValue::new(c, y_norm))], Vec::new())
    }

    /// `(1,0)` on `[0, ½)`, `(0,1)` on `[½, 1]`; with `average` the jump point
    /// takes the mean `(½, ½)` instead.
    pub fn step2(y_norm: NormKind, average: bool) -> PiecewiseConstant {
        let pieces = vec![
            (Region::cube(1, 0.0, 0.5), VectorValue::new(&[1.0, 0.0], y_norm)),
            (Region::cube(1, 0.5, 1.0), VectorValue::new(&[0.0, 1.0], y_norm)),
        ];
        let (name, overrides) = if average {
            ("step2avg", vec![(Point::new(&[0.5]), VectorValue::new(&[0.5, 0.5], y_norm))])
        } else {
            ("step2", Vec::new())
        };
        PiecewiseConstant::new(name, Region::cube(1, 0.0, 1.0), y_norm, pieces, overrides)
            .expect("valid tiling")
    }

    /// `−1` on `[−1, 0)`, `1` on `[0, 1]`.
    pub fn sign1(y_norm: NormKind) -> PiecewiseConstant {
        let pieces = vec![
            (Region::cube(1, -1.0, 0.0), VectorValue::new(&[-1.0], y_norm)),
            (Region::cube(1, 0.0, 1.0), VectorValue::new(&[1.0], y_norm)),
        ];
        PiecewiseConstant::new("sign1", Region::cube(1, -1.0, 1.0), y_norm, pieces, Vec::new())
            .expect("valid tiling")
    }

    /// 4×4 checkerboard on the unit square with values 1 and 2.
    pub fn checker2d(y_norm: NormKind) -> PiecewiseConstant {
        let mut pieces = Vec::new();
        for i in 0..4 {
            for j in 0..4 {
                let r = Region {
                    lo: Point::new(&[i as f64 / 4.0, j as f64 / 4.0]),
                    hi: Point::new(&[(i + 1) as f64 / 4.0, (j + 1) as f64 / 4.0]),
                };
                pieces.push((r, VectorValue::new(&[1.0 + ((i + j) % 2) as f64], y_norm)));
            }
        }
        PiecewiseConstant::new("checker2d", Region::cube(2, 0.0, 1.0), y_norm, pieces, Vec::new())
            .expect("valid tiling")
    }

    /// 0 left of `x₁ = ½`, 1 right of it, on the unit square.
    pub fn vertical_jump(y_norm: NormKind) -> PiecewiseConstant {
        let pieces = vec![
            (Region::from_bounds(&[(0.0, 0.5), (0.0, 1.0)]).unwrap(), VectorValue::new(&[0.0], y_norm)),
            (Region::from_bounds(&[(0.5, 1.0), (0.0, 1.0)]).unwrap(), VectorValue::new(&[1.0], y_norm)),
        ];
        PiecewiseConstant::new("vertical_jump", Region::cube(2, 0.0, 1.0), y_norm, pieces, Vec::new())
            .expect("valid tiling")
    }

    pub fn pieces(&self) -> &[(Region, VectorValue)] {
        &self.pieces
    }

    fn owns(&self, r: &Region, x: &Point) -> bool {
        (0..r.dim()).all(|k| {
            let v = x.get(k);
            r.lo.get(k) <= v && (v < r.hi.get(k) || (v == r.hi.get(k) && v == self.universe.hi.get(k)))
        })
    }

    fn max_norm(&self) -> f64 {
        self.pieces.iter().map(|(_, v)| v.norm()).fold(0.0, f64::max)
    }
}

impl CorpusFunction for PiecewiseConstant {
    fn name(&self) -> &str {
        &self.name
    }
    fn dim_in(&self) -> usize {
        self.universe.dim()
    }
    fn dim_out(&self) -> usize {
        self.pieces[0].1.dim()
    }
    fn universe(&self) -> &Region {
        &self.universe
    }
    fn y_norm(&self) -> NormKind {
        self.y_norm
    }

    fn eval(&self, x: &Point) -> VectorValue {
        if let Some((_, v)) = self.overrides.iter().find(|(p, _)| p == x) {
            return *v;
        }
        self.pieces
            .iter()
            .find(|(r, _)| self.owns(r, x))
            .or_else(|| {
                self.pieces
                    .iter()
                    .min_by(|a, b| a.0.distance_to(x, NormKind::Inf).total_cmp(&b.0.distance_to(x, NormKind::Inf)))
            })
            .map(|(_, v)| *v)
            .expect("at least one piece")
    }

    fn exact_integral(&self, b: &Region) -> VectorValue {
        let mut acc = VectorValue::zeros(self.dim_out(), self.y_norm);
        for (r, v) in &self.pieces {
            if let Some(i) = r.intersect(b) {
                acc.add_assign(&v.scale(i.volume()));
            }
        }
        acc
    }

    fn abs_deviation(&self, b: &Region, c: &VectorValue, _tol: f64) -> Result<MeasureValue> {
        let v = self
            .pieces
            .iter()
            .filter_map(|(r, v)| r.intersect(b).map(|i| i.volume() * v.sub(c).norm()))
            .sum();
        Ok(MeasureValue::exact(v))
    }

    fn exceed_measure(&self, b: &Region, c: &VectorValue, eta: f64, _tol: f64) -> Result<MeasureValue> {
        let v = self
            .pieces
            .iter()
            .filter(|(_, v)| v.sub(c).norm() > eta)
            .filter_map(|(r, _)| r.intersect(b).map(|i| i.volume()))
            .sum();
        Ok(MeasureValue::exact(v))
    }

    fn discontinuities(&self) -> &[Discontinuity] {
        &self.discontinuities
    }

    fn regularity(&self, x: &Point, radius: f64, domain_norm: NormKind) -> Option<Regularity> {
        (radius <= self.discontinuity_distance(x, domain_norm)).then_some(Regularity::Constant)
    }

    fn lipschitz_on(&self, region: &Region, _domain_norm: NormKind) -> Option<f64> {
        let mut seen: Option<VectorValue> = None;
        for (r, v) in &self.pieces {
            let overlaps = r.intersect(region).is_some_and(|i| !i.is_degenerate() || region.is_degenerate());
            if !overlaps {
                continue;
            }
            match seen {
                None => seen = Some(*v),
                Some(s) if s != *v => return None,
                _ => {}
            }
        }
        Some(0.0)
    }

    fn ac_modulus(&self, eps: f64) -> f64 {
        let m = self.max_norm();
        if m > 0.0 {
            eps / m
        } else {
            self.universe.volume()
        }
    }

    fn shell_bound(&self, n: u32, domain_norm: NormKind) -> f64 {
        self.pieces
            .iter()
            .filter(|(r, _)| meets_shell(r, n, domain_norm))
            .map(|(_, v)| v.norm())
            .fold(0.0, f64::max)
    }

    fn sup_norm(&self) -> Option<f64> {
        Some(self.max_norm())
    }

    fn continuity_pieces(&self) -> Option<Vec<ContinuityPiece>> {
        Some(
            self.pieces
                .iter()
                .map(|(r, v)| ContinuityPiece {
                    region: *r,
                    value: Some(*v),
                })
                .collect(),
        )
    }

    fn norm_is_constant(&self) -> bool {
        let first = self.pieces[0].1.norm();
        self.pieces.iter().all(|(_, v)| v.norm() == first) && self.overrides.iter().all(|(_, v)| v.norm() == first)
    }

    fn sign_constant(&self) -> bool {
        (0..self.dim_out()).all(|k| {
            let nonneg = self.pieces.iter().all(|(_, v)| v.components()[k] >= 0.0);
            let nonpos = self.pieces.iter().all(|(_, v)| v.components()[k] <= 0.0);
            nonneg || nonpos
        })
    }
}
