//! Fine, disjoint, nearly exhausting tagged families.
//!
//! The dyadic sieve walks the cube tree of `Ω` level by level: a cube whose
//! circumradius about its centre is within the gauge is emitted, any other is
//! split. Whatever is still pending once its measure drops below `eta` (or at
//! the depth limit) is the residual.

use std::collections::BTreeMap;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{norm_ratio, Gauge, MorseSet, NormKind, Point, Region, Shape};
use crate::integrate::set_measure;
use crate::measure::{measure_box, RadonMeasure};

/// Stuck cells reported with a depth failure are capped at this many.
const STUCK_REPORT_LIMIT: usize = 256;

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct SieveParams {
    pub eta: f64,
    pub max_depth: u32,
}

impl SieveParams {
    pub fn new(eta: f64) -> SieveParams {
        SieveParams { eta, max_depth: 24 }
    }
}

/// One tagged set of a family.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FamilyCell {
    pub tag: Point,
    pub set: MorseSet,
    pub depth: u32,
}

impl FamilyCell {
    pub fn bounds(&self) -> Region {
        self.set.bounding_box()
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TaggedFamily {
    pub omega: Region,
    pub domain_norm: NormKind,
    pub cells: Vec<FamilyCell>,
    pub residual_measure: f64,
    /// Boxes making up the uncovered part, when it is a box union.
    pub residual_cells: Option<Vec<Region>>,
    pub depth_histogram: BTreeMap<u32, usize>,
}

impl TaggedFamily {
    pub(crate) fn assemble(
        omega: Region,
        domain_norm: NormKind,
        cells: Vec<FamilyCell>,
        residual_measure: f64,
        residual_cells: Option<Vec<Region>>,
    ) -> TaggedFamily {
        let mut depth_histogram = BTreeMap::new();
        for c in &cells {
            *depth_histogram.entry(c.depth).or_insert(0) += 1;
        }
        TaggedFamily {
            omega,
            domain_norm,
            cells,
            // no negative zero in reports
            residual_measure: if residual_measure > 0.0 { residual_measure } else { 0.0 },
            residual_cells,
            depth_histogram,
        }
    }

    /// Write one row per cell: tag coordinates, box bounds, depth.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let d = self.omega.dim();
        let mut header: Vec<String> = (0..d).map(|k| format!("tag{k}")).collect();
        header.extend((0..d).flat_map(|k| [format!("lo{k}"), format!("hi{k}")]));
        header.push("depth".into());
        writeln!(w, "{}", header.join(","))?;
        for c in &self.cells {
            let b = c.bounds();
            let mut row: Vec<String> = (0..d).map(|k| format!("{:.16e}", c.tag.get(k))).collect();
            row.extend((0..d).flat_map(|k| [format!("{:.16e}", b.lo.get(k)), format!("{:.16e}", b.hi.get(k))]));
            row.push(c.depth.to_string());
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// A cube the sieve could not make fine, with the gauge at its centre.
#[derive(Clone, Debug, Serialize)]
pub struct StuckCell {
    pub region: Region,
    pub delta: f64,
}

/// Split `omega` into equal cubes, one per tile.
fn tiles(omega: &Region) -> Result<Vec<Region>> {
    let d = omega.dim();
    let side = (0..d).map(|k| omega.extent(k)).fold(f64::INFINITY, f64::min);
    if !(side > 0.0) {
        return Err(Error::Config(format!("degenerate sieve domain {omega:?}")));
    }
    let mut counts = Vec::with_capacity(d);
    for k in 0..d {
        let ratio = omega.extent(k) / side;
        let n = ratio.round();
        if (ratio - n).abs() > 1e-9 * ratio {
            return Err(Error::Config(format!(
                "sieve domain {omega:?} is not a union of equal cubes"
            )));
        }
        counts.push(n as usize);
    }
    let total: usize = counts.iter().product();
    let mut out = Vec::with_capacity(total);
    for t in 0..total {
        let mut rem = t;
        let mut lo = omega.lo;
        let mut hi = omega.lo;
        for k in (0..d).rev() {
            let i = rem % counts[k];
            rem /= counts[k];
            lo.set(k, omega.lo.get(k) + i as f64 * side);
            hi.set(
                k,
                if i + 1 == counts[k] {
                    omega.hi.get(k)
                } else {
                    omega.lo.get(k) + (i + 1) as f64 * side
                },
            );
        }
        out.push(Region { lo, hi });
    }
    Ok(out)
}

/// Address of a dyadic cube: tile, level, per-axis index.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct Addr {
    tile: u32,
    index: [u64; 3],
}

fn cube_of(tile: &Region, level: u32, idx: &[u64; 3]) -> Region {
    let d = tile.dim();
    let n = f64::powi(2.0, level as i32);
    let mut lo = tile.lo;
    let mut hi = tile.hi;
    for k in 0..d {
        let side = tile.extent(k);
        lo.set(k, tile.lo.get(k) + side * (idx[k] as f64 / n));
        hi.set(k, tile.lo.get(k) + side * ((idx[k] + 1) as f64 / n));
    }
    Region { lo, hi }
}

/// Depth-first position of a cube: per-level child digits, axis 0 most
/// significant within a digit, left-aligned so that shallower cubes sort
/// before their (never co-emitted) descendants' siblings correctly.
fn morton_key(level: u32, idx: &[u64; 3], d: usize) -> u128 {
    let mut key: u128 = 0;
    for l in (0..level).rev() {
        for i in idx.iter().take(d) {
            key = (key << 1) | ((i >> l) & 1) as u128;
        }
    }
    key << (126 - level as usize * d)
}

/// Deterministic per-cell coin for trial refinements.
fn cell_coin(seed: u64, trial: u32, addr: &Addr, level: u32) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }
    let mut h = mix(seed ^ ((trial as u64) << 32) ^ level as u64);
    h = mix(h ^ addr.tile as u64);
    for i in addr.index {
        h = mix(h ^ i);
    }
    h
}

/// Dyadic sieve over `omega`. Trial `0` is the plain greedy sieve; trial
/// `t > 0` additionally splits each fine cube with probability ¼ (seeded), so
/// different trials give different fine families for the same gauge.
pub fn dyadic_sieve_trial(
    omega: &Region,
    g: &Gauge,
    mu: &RadonMeasure,
    p: &SieveParams,
    domain_norm: NormKind,
    trial: u32,
    seed: u64,
) -> Result<TaggedFamily> {
    if !(p.eta > 0.0) {
        return Err(Error::Config(format!("eta must be positive, got {}", p.eta)));
    }
    let d = omega.dim();
    if p.max_depth as usize * d > 126 {
        return Err(Error::Config(format!(
            "max depth {} too large for dimension {d}",
            p.max_depth
        )));
    }
    mu.check_inside(omega)?;
    let tiles = tiles(omega)?;
    let ratio = norm_ratio(domain_norm, NormKind::Inf, d);
    let mut pending: Vec<Addr> = (0..tiles.len() as u32)
        .map(|tile| Addr { tile, index: [0; 3] })
        .collect();
    let mut emitted: Vec<(u32, u128, FamilyCell)> = Vec::new();
    let mut level = 0u32;
    loop {
        let pending_measure: f64 = pending
            .par_iter()
            .map(|a| measure_box(mu, &cube_of(&tiles[a.tile as usize], level, &a.index)).map(|m| m.value))
            .sum::<Result<f64>>()?;
        if pending_measure <= p.eta || pending.is_empty() {
            let residual_cells: Vec<Region> = pending
                .iter()
                .map(|a| cube_of(&tiles[a.tile as usize], level, &a.index))
                .collect();
            return Ok(finish(omega, domain_norm, emitted, pending_measure, residual_cells));
        }
        let verdicts: Vec<(Region, f64)> = pending
            .par_iter()
            .map(|a| {
                let r = cube_of(&tiles[a.tile as usize], level, &a.index);
                g.eval(&r.center()).map(|delta| (r, delta))
            })
            .collect::<Result<_>>()?;
        if level == p.max_depth {
            let mut stuck: Vec<StuckCell> = verdicts
                .iter()
                .filter(|(r, delta)| 0.5 * r.extent(0) * ratio > *delta)
                .map(|(r, delta)| StuckCell {
                    region: *r,
                    delta: *delta,
                })
                .collect();
            stuck.truncate(STUCK_REPORT_LIMIT);
            // fine cubes at the last level still count
            let mut residual = 0.0;
            for (a, (r, delta)) in pending.iter().zip(&verdicts) {
                if 0.5 * r.extent(0) * ratio <= *delta {
                    emitted.push(emit(a, r, level, d, domain_norm));
                } else {
                    residual += measure_box(mu, r)?.value;
                }
            }
            if residual <= p.eta {
                let residual_cells = pending
                    .iter()
                    .zip(&verdicts)
                    .filter(|(_, (r, delta))| 0.5 * r.extent(0) * ratio > *delta)
                    .map(|(_, (r, _))| *r)
                    .collect();
                return Ok(finish(omega, domain_norm, emitted, residual, residual_cells));
            }
            return Err(Error::DepthExceeded {
                residual,
                eta: p.eta,
                stuck,
            });
        }
        let mut next = Vec::new();
        for (a, (r, delta)) in pending.iter().zip(&verdicts) {
            let half = 0.5 * r.extent(0);
            let fine = half * ratio <= *delta;
            let forced = trial > 0 && fine && cell_coin(seed, trial, a, level) % 4 == 0;
            if fine && !forced {
                emitted.push(emit(a, r, level, d, domain_norm));
            } else {
                for c in 0..(1u64 << d) {
                    let mut index = [0u64; 3];
                    for k in 0..d {
                        // child order: axis 0 is the most significant bit
                        let bit = (c >> (d - 1 - k)) & 1;
                        index[k] = 2 * a.index[k] + bit;
                    }
                    next.push(Addr { tile: a.tile, index });
                }
            }
        }
        pending = next;
        level += 1;
    }
}

fn emit(a: &Addr, r: &Region, level: u32, d: usize, domain_norm: NormKind) -> (u32, u128, FamilyCell) {
    let set = MorseSet::cube_unchecked(r.center(), 0.5 * r.extent(0), domain_norm);
    (
        a.tile,
        morton_key(level, &a.index, d),
        FamilyCell {
            tag: set.tag,
            set,
            depth: level,
        },
    )
}

fn finish(
    omega: &Region,
    domain_norm: NormKind,
    mut emitted: Vec<(u32, u128, FamilyCell)>,
    residual: f64,
    residual_cells: Vec<Region>,
) -> TaggedFamily {
    emitted.sort_by(|a, b| (a.0, a.1, a.2.depth).cmp(&(b.0, b.1, b.2.depth)));
    let cells = emitted.into_iter().map(|(_, _, c)| c).collect();
    TaggedFamily::assemble(*omega, domain_norm, cells, residual, Some(residual_cells))
}

pub fn dyadic_sieve(
    omega: &Region,
    g: &Gauge,
    mu: &RadonMeasure,
    p: &SieveParams,
    domain_norm: NormKind,
) -> Result<TaggedFamily> {
    dyadic_sieve_trial(omega, g, mu, p, domain_norm, 0, 0)
}

/// Greedy packing of disjoint closed balls `B(x, r)` with `r ≤ δ(x)`, tried
/// at the centres of successively finer dyadic grids.
pub fn vitali_ball_pack(
    omega: &Region,
    g: &Gauge,
    mu: &RadonMeasure,
    p: &SieveParams,
    domain_norm: NormKind,
) -> Result<TaggedFamily> {
    mu.check_inside(omega)?;
    let tiles = tiles(omega)?;
    let d = omega.dim();
    let total = measure_box(mu, omega)?.value;
    let tol = 1e-12 * total.max(1e-300);
    let mut cells: Vec<FamilyCell> = Vec::new();
    let mut covered = 0.0;
    let stop = |covered: f64| total - covered <= p.eta;
    let mut level = 0u32;
    while !stop(covered) {
        if level > p.max_depth || (1u64 << (level as usize * d)) * tiles.len() as u64 > 1 << 16 {
            let residual = total - covered;
            let family = TaggedFamily::assemble(*omega, domain_norm, cells, residual, None);
            return Err(Error::ResidualStuck {
                residual,
                eta: p.eta,
                family: Box::new(family),
            });
        }
        let n = 1u64 << level;
        for tile in &tiles {
            for flat in 0..n.pow(d as u32) {
                let mut index = [0u64; 3];
                let mut rem = flat;
                for k in (0..d).rev() {
                    index[k] = rem % n;
                    rem /= n;
                }
                let c = cube_of(tile, level, &index).center();
                // a p-ball of radius r reaches r along each axis
                let mut r = g.eval(&c)?.min(omega.inner_distance(&c));
                for other in &cells {
                    let Shape::Ball { radius, .. } = other.set.shape else { unreachable!() };
                    r = r.min(c.distance(&other.tag, domain_norm) - radius);
                    if r <= 0.0 {
                        break;
                    }
                }
                if r <= 0.0 {
                    continue;
                }
                let ball = MorseSet {
                    tag: c,
                    shape: Shape::Ball {
                        radius: r,
                        norm: domain_norm,
                    },
                    lambda: 1.0,
                    domain_norm,
                };
                covered += set_measure(mu, &ball, tol)?.value;
                cells.push(FamilyCell {
                    tag: c,
                    set: ball,
                    depth: level,
                });
                if stop(covered) {
                    break;
                }
            }
            if stop(covered) {
                break;
            }
        }
        level += 1;
    }
    Ok(TaggedFamily::assemble(*omega, domain_norm, cells, (total - covered).max(0.0), None))
}

/// Independent audit of the family invariants.
#[derive(Clone, Debug, Default, Serialize)]
pub struct FamilyAudit {
    pub disjoint: bool,
    pub fine: bool,
    pub tags_centred: bool,
    pub inside: bool,
    pub balanced: bool,
    pub residual_ok: bool,
    pub balance_error: f64,
    pub failures: Vec<String>,
}

impl FamilyAudit {
    pub fn ok(&self) -> bool {
        self.disjoint && self.fine && self.tags_centred && self.inside && self.balanced && self.residual_ok
    }
}

const AUDIT_NOTE_LIMIT: usize = 16;

fn note(a: &mut FamilyAudit, msg: impl FnOnce() -> String) {
    if a.failures.len() < AUDIT_NOTE_LIMIT {
        a.failures.push(msg());
    }
}

/// Is `tag` the tag of a λ-Morse set `S` with the family's λ? For cubes this
/// compares the inner and outer radii about `tag`; other shapes must keep
/// their own tag.
fn tag_is_centred(c: &FamilyCell) -> bool {
    match &c.set.shape {
        Shape::Cube { half_side } => {
            let b = Region::centered(&c.set.tag, *half_side);
            let inner = b.inner_distance(&c.tag);
            let outer = b.farthest_distance(&c.tag, c.set.domain_norm);
            inner > 0.0 && outer <= c.set.lambda * inner * (1.0 + 1e-12)
        }
        _ => c.tag == c.set.tag,
    }
}

fn sets_overlap(a: &MorseSet, b: &MorseSet) -> bool {
    let (ba, bb) = (a.bounding_box(), b.bounding_box());
    let scale = ba.diameter(NormKind::Inf).min(bb.diameter(NormKind::Inf));
    if !ba.interiors_overlap(&bb, 1e-12 * scale) {
        return false;
    }
    match (&a.shape, &b.shape) {
        (Shape::Cube { .. }, Shape::Cube { .. }) => true,
        (Shape::Ball { radius: ra, norm }, Shape::Ball { radius: rb, .. }) => {
            a.tag.distance(&b.tag, *norm) < (ra + rb) * (1.0 - 1e-12)
        }
        (Shape::Ball { radius, norm }, Shape::Cube { .. }) => b.bounding_box().distance_to(&a.tag, *norm) < radius * (1.0 - 1e-12),
        (Shape::Cube { .. }, Shape::Ball { .. }) => sets_overlap(b, a),
        _ => true,
    }
}

pub fn audit_family(fam: &TaggedFamily, g: &Gauge, mu: &RadonMeasure, eta: f64) -> Result<FamilyAudit> {
    let mut a = FamilyAudit {
        disjoint: true,
        fine: true,
        tags_centred: true,
        inside: true,
        ..Default::default()
    };
    let norm_kind = fam.domain_norm;
    // fineness, re-evaluated with the gauge
    let deltas: Vec<Result<f64>> = fam.cells.par_iter().map(|c| g.eval(&c.tag)).collect();
    for (i, (c, delta)) in fam.cells.iter().zip(deltas).enumerate() {
        let reach = c.set.reach_from(&c.tag, norm_kind);
        match delta {
            Ok(delta) if reach <= delta => {}
            Ok(delta) => {
                a.fine = false;
                note(&mut a, || format!("cell {i}: reach {reach:e} > δ {delta:e}"));
            }
            Err(e) => {
                a.fine = false;
                note(&mut a, || format!("cell {i}: gauge failed: {e}"));
            }
        }
        if !tag_is_centred(c) {
            a.tags_centred = false;
            note(&mut a, || format!("cell {i}: tag {:?} is not a Morse tag of its set", c.tag));
        }
        if !fam.omega.contains_region_tol(&c.bounds(), 1e-12) {
            a.inside = false;
            note(&mut a, || format!("cell {i}: leaves Ω"));
        }
    }
    // pairwise disjointness: sweep along axis 0
    let mut order: Vec<usize> = (0..fam.cells.len()).collect();
    let boxes: Vec<Region> = fam.cells.iter().map(|c| c.bounds()).collect();
    order.sort_by(|&i, &j| boxes[i].lo.get(0).total_cmp(&boxes[j].lo.get(0)));
    let mut active: Vec<usize> = Vec::new();
    for &i in &order {
        let start = boxes[i].lo.get(0);
        active.retain(|&j| boxes[j].hi.get(0) > start);
        for &j in &active {
            if sets_overlap(&fam.cells[i].set, &fam.cells[j].set) {
                a.disjoint = false;
                note(&mut a, || format!("cells {j} and {i} overlap"));
            }
        }
        active.push(i);
    }
    // measure balance, with measures recomputed from the sets
    let total = measure_box(mu, &fam.omega)?.value;
    let tol = 1e-13 * total.max(1e-300);
    let covered: f64 = fam
        .cells
        .par_iter()
        .map(|c| set_measure(mu, &c.set, tol).map(|m| m.value))
        .collect::<Result<Vec<f64>>>()?
        .iter()
        .sum();
    a.balance_error = (covered + fam.residual_measure - total).abs() / total.max(1e-300);
    a.balanced = a.balance_error <= 1e-9;
    if !a.balanced {
        let e = a.balance_error;
        note(&mut a, || format!("measure balance off by {e:e} (relative)"));
    }
    a.residual_ok = fam.residual_measure <= eta;
    if !a.residual_ok {
        note(&mut a, || format!("residual {:e} > eta {eta:e}", fam.residual_measure));
    }
    Ok(a)
}

pub fn verify_family(fam: &TaggedFamily, g: &Gauge, mu: &RadonMeasure, eta: f64) -> bool {
    audit_family(fam, g, mu, eta).map(|a| a.ok()).unwrap_or(false)
}

/// Replace cell `i` by its `2^d` dyadic children (cube cells only).
pub fn split_cell(fam: &TaggedFamily, i: usize) -> TaggedFamily {
    let mut cells = Vec::with_capacity(fam.cells.len() + 7);
    for (j, c) in fam.cells.iter().enumerate() {
        if j != i {
            cells.push(c.clone());
            continue;
        }
        for child in c.bounds().children() {
            let set = MorseSet::cube_unchecked(child.center(), 0.5 * child.extent(0), fam.domain_norm);
            cells.push(FamilyCell {
                tag: set.tag,
                set,
                depth: c.depth + 1,
            });
        }
    }
    TaggedFamily::assemble(
        fam.omega,
        fam.domain_norm,
        cells,
        fam.residual_measure,
        fam.residual_cells.clone(),
    )
}

/// Deliberate corruptions used to show the verifiers can fail.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Sabotage {
    InflateDelta,
    OverlapCells,
    OffcenterTags,
}

impl Sabotage {
    pub fn parse(s: &str) -> Result<Sabotage> {
        match s {
            "inflate-delta" => Ok(Sabotage::InflateDelta),
            "overlap-cells" => Ok(Sabotage::OverlapCells),
            "offcenter-tags" => Ok(Sabotage::OffcenterTags),
            other => Err(Error::Config(format!("unknown sabotage mode `{other}`"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Sabotage::InflateDelta => "inflate-delta",
            Sabotage::OverlapCells => "overlap-cells",
            Sabotage::OffcenterTags => "offcenter-tags",
        }
    }
}

/// Grow the largest cube cell by 1% about its centre.
pub fn inflate_one_cell(fam: &TaggedFamily) -> TaggedFamily {
    let mut out = fam.clone();
    let Some((i, _)) = fam
        .cells
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.set.inner_radius().total_cmp(&b.1.set.inner_radius()))
    else {
        return out;
    };
    match &mut out.cells[i].set.shape {
        Shape::Cube { half_side } => *half_side *= 1.01,
        Shape::Ball { radius, .. } => *radius *= 1.01,
        Shape::Star2D { .. } => {}
    }
    out
}

/// Move every tag to the lower corner of its cell.
pub fn move_tags_to_corners(fam: &TaggedFamily) -> TaggedFamily {
    let mut out = fam.clone();
    for c in &mut out.cells {
        c.tag = c.bounds().lo;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit(d: usize) -> (Region, RadonMeasure) {
        let u = Region::cube(d, 0.0, 1.0);
        (u, RadonMeasure::lebesgue(u))
    }

    #[test]
    fn whole_interval_when_gauge_is_one() {
        let (u, mu) = unit(1);
        let g = Gauge::constant(1.0).unwrap();
        let fam = dyadic_sieve(&u, &g, &mu, &SieveParams::new(1e-6), NormKind::Two).unwrap();
        assert_eq!(fam.cells.len(), 1);
        assert_eq!(fam.cells[0].tag, Point::new(&[0.5]));
        assert_eq!(fam.residual_measure, 0.0);
    }

    #[test]
    fn two_halves_at_point_three() {
        let (u, mu) = unit(1);
        let g = Gauge::constant(0.3).unwrap();
        let fam = dyadic_sieve(&u, &g, &mu, &SieveParams::new(1e-6), NormKind::Two).unwrap();
        let tags: Vec<f64> = fam.cells.iter().map(|c| c.tag.get(0)).collect();
        assert_eq!(tags, vec![0.25, 0.75]);
        assert!(verify_family(&fam, &g, &mu, 1e-6));
    }

    #[test]
    fn cascade_toward_zero() {
        let (u, mu) = unit(1);
        let g = Gauge::from_fn(|x| Ok((x.get(0) / 2.0).max(f64::powi(2.0, -30))), Default::default());
        let fam = dyadic_sieve(&u, &g, &mu, &SieveParams::new(1e-3), NormKind::Two).unwrap();
        assert!(fam.residual_measure <= 1e-3);
        // cubes [a, 2a] with centre 1.5a need half-width a/2 ≤ 0.75a: one per
        // octave, plus the splits of the first octaves
        assert!(fam.cells.len() <= 3 * 12, "{}", fam.cells.len());
        assert!(verify_family(&fam, &g, &mu, 1e-3));
    }

    #[test]
    fn depth_exceeded_reports_stuck_cells() {
        let (u, mu) = unit(2);
        let g = Gauge::constant(1e-6).unwrap();
        let p = SieveParams { eta: 1e-3, max_depth: 4 };
        match dyadic_sieve(&u, &g, &mu, &p, NormKind::Inf) {
            Err(Error::DepthExceeded { stuck, residual, .. }) => {
                assert_eq!(stuck.len(), 256);
                assert!((residual - 1.0).abs() < 1e-12);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn canonical_order_is_depth_first() {
        let (u, mu) = unit(1);
        let g = Gauge::from_fn(|x| Ok(if x.get(0) < 0.5 { 0.1 } else { 1.0 }), Default::default());
        let fam = dyadic_sieve(&u, &g, &mu, &SieveParams::new(1e-9), NormKind::Two).unwrap();
        let lo: Vec<f64> = fam.cells.iter().map(|c| c.bounds().lo.get(0)).collect();
        let mut sorted = lo.clone();
        sorted.sort_by(f64::total_cmp);
        assert_eq!(lo, sorted);
    }

    #[test]
    fn trials_differ_but_stay_valid() {
        let (u, mu) = unit(2);
        let g = Gauge::constant(0.2).unwrap();
        let p = SieveParams::new(1e-9);
        let base = dyadic_sieve(&u, &g, &mu, &p, NormKind::Inf).unwrap();
        let t1 = dyadic_sieve_trial(&u, &g, &mu, &p, NormKind::Inf, 1, 7).unwrap();
        assert!(t1.cells.len() > base.cells.len());
        assert!(verify_family(&t1, &g, &mu, 1e-9));
    }

    #[test]
    fn sabotage_detected() {
        let (u, mu) = unit(2);
        let g = Gauge::constant(0.2).unwrap();
        let fam = dyadic_sieve(&u, &g, &mu, &SieveParams::new(1e-9), NormKind::Inf).unwrap();
        let a = audit_family(&inflate_one_cell(&fam), &g, &mu, 1e-9).unwrap();
        assert!(!a.disjoint);
        let a = audit_family(&move_tags_to_corners(&fam), &g, &mu, 1e-9).unwrap();
        assert!(!a.tags_centred);
    }

    #[test]
    fn ball_packing_examples() {
        let (u, mu) = unit(1);
        let g = Gauge::constant(1.0).unwrap();
        let fam = vitali_ball_pack(&u, &g, &mu, &SieveParams::new(0.5), NormKind::Two).unwrap();
        assert_eq!(fam.cells.len(), 1);
        assert_eq!(fam.residual_measure, 0.0);

        let (u, mu) = unit(2);
        let fam = vitali_ball_pack(&u, &g, &mu, &SieveParams::new(0.25), NormKind::Two).unwrap();
        assert!(fam.residual_measure <= 0.25);
        assert!((fam.residual_measure - (1.0 - std::f64::consts::PI / 4.0)).abs() < 1e-12);
        assert!(verify_family(&fam, &g, &mu, 0.25));

        let fam = vitali_ball_pack(&u, &g, &mu, &SieveParams::new(0.05), NormKind::Two).unwrap();
        assert!(fam.residual_measure <= 0.05);
        assert!(verify_family(&fam, &g, &mu, 0.05));

        let fam = vitali_ball_pack(&u, &g, &mu, &SieveParams::new(2.0), NormKind::Two).unwrap();
        assert!(fam.cells.is_empty());
    }

    #[test]
    fn csv_rows() {
        let (u, mu) = unit(1);
        let g = Gauge::constant(0.3).unwrap();
        let fam = dyadic_sieve(&u, &g, &mu, &SieveParams::new(1e-6), NormKind::Two).unwrap();
        let mut buf = Vec::new();
        fam.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 3);
        assert!(text.starts_with("tag0,lo0,hi0,depth"));
    }
}
