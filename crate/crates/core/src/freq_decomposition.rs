//! Whitney-type decompositions of ℝ²×ℝ² driven by Φ and F: square tiles,
//! angular sectors, the near-parallel K-strips, annular and flat rectangle
//! tiles, and measured multiplicities.

use rayon::prelude::*;
use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::Debug;
use std::hash::Hash;

use crate::error::{Result, ZkError};
use crate::resonance::{resonance_phi, transversality_f, FreqPair};

/// Half-open rectangle [x0, x1) × [y0, y1).
pub type Rect = [f64; 4];

pub fn rect_contains(r: &Rect, p: [f64; 2]) -> bool {
    p[0] >= r[0] && p[0] < r[1] && p[1] >= r[2] && p[1] < r[3]
}

fn rect_corners(r: &Rect) -> [[f64; 2]; 4] {
    [[r[0], r[2]], [r[1], r[2]], [r[0], r[3]], [r[1], r[3]]]
}

pub fn rect_center(r: &Rect) -> [f64; 2] {
    [(r[0] + r[1]) / 2.0, (r[2] + r[3]) / 2.0]
}

/// (min |p|, max |p|) over the closed rectangle.
pub fn rect_norm_range(r: &Rect) -> (f64, f64) {
    let cx = 0f64.clamp(r[0], r[1]);
    let cy = 0f64.clamp(r[2], r[3]);
    let min = cx.hypot(cy);
    let max = rect_corners(r)
        .iter()
        .map(|c| c[0].hypot(c[1]))
        .fold(0.0, f64::max);
    (min, max)
}

pub fn rect_meets_annulus(r: &Rect, r0: f64, r1: f64) -> bool {
    let (lo, hi) = rect_norm_range(r);
    lo <= r1 && hi >= r0
}

pub fn minkowski_sum(a: &Rect, b: &Rect) -> Rect {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2], a[3] + b[3]]
}

/// 3×3 sample lattice of a rectangle (corners, edge midpoints, center).
fn rect_samples(r: &Rect) -> Vec<[f64; 2]> {
    let xs = [r[0], (r[0] + r[1]) / 2.0, r[1]];
    let ys = [r[2], (r[2] + r[3]) / 2.0, r[3]];
    xs.iter().flat_map(|&x| ys.iter().map(move |&y| [x, y])).collect()
}

pub fn abs_sin_angle(p: [f64; 2], q: [f64; 2]) -> f64 {
    let n = p[0].hypot(p[1]) * q[0].hypot(q[1]);
    if n == 0.0 {
        0.0
    } else {
        (p[0] * q[1] - p[1] * q[0]).abs() / n
    }
}

/// Largest |sin∠(ℓ₁,ℓ₂)| over 3×3 samples of each rectangle.
pub fn sampled_max_sin(r1: &Rect, r2: &Rect) -> f64 {
    let s2 = rect_samples(r2);
    rect_samples(r1)
        .iter()
        .flat_map(|p| s2.iter().map(move |q| abs_sin_angle(*p, *q)))
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairPoly {
    Phi,
    F,
}

#[derive(Debug, Clone, Copy)]
struct Iv(f64, f64);

impl Iv {
    fn add(self, o: Iv) -> Iv {
        Iv(self.0 + o.0, self.1 + o.1)
    }
    fn scale(self, c: f64) -> Iv {
        if c >= 0.0 {
            Iv(c * self.0, c * self.1)
        } else {
            Iv(c * self.1, c * self.0)
        }
    }
    fn mul(self, o: Iv) -> Iv {
        let p = [self.0 * o.0, self.0 * o.1, self.1 * o.0, self.1 * o.1];
        Iv(
            p.iter().cloned().fold(f64::INFINITY, f64::min),
            p.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        )
    }
    fn mag(self) -> f64 {
        self.0.abs().max(self.1.abs())
    }
}

impl PairPoly {
    pub fn eval(&self, p1: [f64; 2], p2: [f64; 2]) -> f64 {
        let p = FreqPair::new(p1, p2);
        match self {
            PairPoly::Phi => resonance_phi(&p),
            PairPoly::F => transversality_f(&p),
        }
    }

    /// Bound on |∇| over a box whose coordinates are all at most `radius`.
    pub fn isotropic_gradient_bound(&self, radius: f64) -> f64 {
        match self {
            PairPoly::Phi => 6.0 * radius * radius,
            PairPoly::F => 6.0 * radius,
        }
    }

    /// Per-coordinate sup |∂f| over r1 × r2, order (ξ₁, η₁, ξ₂, η₂).
    pub fn partial_bounds(&self, r1: &Rect, r2: &Rect) -> [f64; 4] {
        let (x1, y1) = (Iv(r1[0], r1[1]), Iv(r1[2], r1[3]));
        let (x2, y2) = (Iv(r2[0], r2[1]), Iv(r2[2], r2[3]));
        match self {
            PairPoly::Phi => [
                x2.mul(x1.scale(2.0).add(x2)).mag(),
                y2.mul(y1.scale(2.0).add(y2)).mag(),
                x1.mul(x1.add(x2.scale(2.0))).mag(),
                y1.mul(y1.add(y2.scale(2.0))).mag(),
            ],
            PairPoly::F => [
                y2.add(y1.scale(2.0)).mag(),
                x2.add(x1.scale(2.0)).mag(),
                y1.add(y2.scale(2.0)).mag(),
                x1.add(x2.scale(2.0)).mag(),
            ],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Slack {
    /// |∇Φ| ≤ 6R², |∇F| ≤ 6R with R the sup-norm radius of the product box,
    /// times the largest distance to the nearest corner.
    Isotropic,
    /// Σᵢ sup|∂ᵢf|·(half side)ᵢ with interval bounds on each partial.
    Interval,
}

/// Certified lower bound for min |f| over r1 × r2 (may be negative).
pub fn certified_lower_bound(poly: PairPoly, r1: &Rect, r2: &Rect, slack: Slack) -> f64 {
    let c2 = rect_corners(r2);
    let min_corner = rect_corners(r1)
        .iter()
        .flat_map(|p| c2.iter().map(move |q| poly.eval(*p, *q).abs()))
        .fold(f64::INFINITY, f64::min);
    let half = [
        (r1[1] - r1[0]) / 2.0,
        (r1[3] - r1[2]) / 2.0,
        (r2[1] - r2[0]) / 2.0,
        (r2[3] - r2[2]) / 2.0,
    ];
    let s = match slack {
        Slack::Isotropic => {
            let radius = r1.iter().chain(r2.iter()).fold(0.0f64, |a, v| a.max(v.abs()));
            let h = half.iter().map(|v| v * v).sum::<f64>().sqrt();
            poly.isotropic_gradient_bound(radius) * h
        }
        Slack::Interval => poly
            .partial_bounds(r1, r2)
            .iter()
            .zip(half.iter())
            .map(|(g, h)| g * h)
            .sum(),
    };
    min_corner - s
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PairClass {
    Z1,
    Z2,
    Unresolved,
}

pub fn classify_rects(r1: &Rect, r2: &Rect, thr_phi: f64, thr_f: f64, slack: Slack) -> PairClass {
    if certified_lower_bound(PairPoly::Phi, r1, r2, slack) >= thr_phi {
        PairClass::Z1
    } else if certified_lower_bound(PairPoly::F, r1, r2, slack) >= thr_f {
        PairClass::Z2
    } else {
        PairClass::Unresolved
    }
}

/// A dyadic tile family refined by 2×2 splitting.
pub trait WhitneyTile: Copy + Eq + Hash + Send + Sync + Debug {
    fn rect(&self) -> Rect;
    fn scale(&self) -> u32;
    fn index(&self) -> [i64; 2];
    fn children(&self) -> [Self; 4];
    /// Tile of the same family at `scale` containing p.
    fn locate_at(&self, p: [f64; 2], scale: u32) -> Self;
    /// (Φ threshold, F threshold) at this tile's scale.
    fn thresholds(&self) -> (f64, f64);
}

/// T^A_m = [m₁N₁/A, (m₁+1)N₁/A) × [m₂N₁/A, (m₂+1)N₁/A).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SquareTile {
    pub a: u32,
    pub m: [i64; 2],
    pub n1: f64,
}

impl Eq for SquareTile {}

impl Hash for SquareTile {
    fn hash<H: std::hash::Hasher>(&self, h: &mut H) {
        self.a.hash(h);
        self.m.hash(h);
        self.n1.to_bits().hash(h);
    }
}

impl SquareTile {
    pub fn new(a: u32, m: [i64; 2], n1: f64) -> Self {
        Self { a, m, n1 }
    }

    pub fn side(&self) -> f64 {
        self.n1 / self.a as f64
    }

    pub fn locate(p: [f64; 2], a: u32, n1: f64) -> Self {
        let s = n1 / a as f64;
        Self::new(a, [(p[0] / s).floor() as i64, (p[1] / s).floor() as i64], n1)
    }

    pub fn contains(&self, p: [f64; 2]) -> bool {
        rect_contains(&self.rect(), p)
    }
}

impl WhitneyTile for SquareTile {
    fn rect(&self) -> Rect {
        let s = self.side();
        let (x, y) = (self.m[0] as f64 * s, self.m[1] as f64 * s);
        [x, x + s, y, y + s]
    }
    fn scale(&self) -> u32 {
        self.a
    }
    fn index(&self) -> [i64; 2] {
        self.m
    }
    fn children(&self) -> [Self; 4] {
        let [a, b] = [2 * self.m[0], 2 * self.m[1]];
        let c = |i, j| SquareTile::new(2 * self.a, [a + i, b + j], self.n1);
        [c(0, 0), c(1, 0), c(0, 1), c(1, 1)]
    }
    fn locate_at(&self, p: [f64; 2], scale: u32) -> Self {
        SquareTile::locate(p, scale, self.n1)
    }
    fn thresholds(&self) -> (f64, f64) {
        let a = self.a as f64;
        (self.n1.powi(3) / a, self.n1.powi(2) / a)
    }
}

/// Certified class of a square-tile pair, with the isotropic gradient slack.
pub fn classify_tile_pair(t1: &SquareTile, t2: &SquareTile) -> Result<PairClass> {
    classify_tile_pair_with(t1, t2, Slack::Isotropic)
}

pub fn classify_tile_pair_with(t1: &SquareTile, t2: &SquareTile, slack: Slack) -> Result<PairClass> {
    if t1.a != t2.a || t1.n1 != t2.n1 {
        return Err(ZkError::ScaleMismatch(t1.a as f64, t2.a as f64));
    }
    let (tp, tf) = t1.thresholds();
    Ok(classify_rects(&t1.rect(), &t2.rect(), tp, tf, slack))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    /// newly resolved by |Φ|
    Z1,
    /// newly resolved by |F|
    Z2,
    /// unresolved at the finest scale
    Residual,
}

impl Label {
    pub fn as_str(&self) -> &'static str {
        match self {
            Label::Z1 => "Z1",
            Label::Z2 => "Z2",
            Label::Residual => "residual",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CoverEntry<T> {
    pub scale: u32,
    pub t1: T,
    pub t2: T,
    pub label: Label,
}

/// Whitney refinement: each pair is classified at its scale; resolved pairs
/// are emitted, unresolved ones split into 16 children until `max_scale`.
pub fn refine<T, F, V>(roots: Vec<(T, T)>, max_scale: u32, slack: Slack, filter: F, mut visit: V)
where
    T: WhitneyTile,
    F: Fn(&T, &T) -> bool + Sync,
    V: FnMut(CoverEntry<T>),
{
    let mut level: Vec<(T, T)> = roots.into_iter().filter(|(a, b)| filter(a, b)).collect();
    while !level.is_empty() {
        let classes: Vec<PairClass> = level
            .par_iter()
            .map(|(a, b)| {
                let (tp, tf) = a.thresholds();
                classify_rects(&a.rect(), &b.rect(), tp, tf, slack)
            })
            .collect();
        let mut next = Vec::new();
        for ((a, b), c) in level.into_iter().zip(classes) {
            let scale = a.scale();
            match c {
                PairClass::Z1 | PairClass::Z2 => visit(CoverEntry {
                    scale,
                    t1: a,
                    t2: b,
                    label: if c == PairClass::Z1 { Label::Z1 } else { Label::Z2 },
                }),
                PairClass::Unresolved if scale >= max_scale => visit(CoverEntry {
                    scale,
                    t1: a,
                    t2: b,
                    label: Label::Residual,
                }),
                PairClass::Unresolved => {
                    for ca in a.children() {
                        for cb in b.children() {
                            next.push((ca, cb));
                        }
                    }
                }
            }
        }
        level = next.into_par_iter().filter(|(a, b)| filter(a, b)).collect();
    }
}

#[derive(Debug, Clone)]
pub struct Cover<T> {
    pub entries: Vec<CoverEntry<T>>,
    pub floor: u32,
    pub max_scale: u32,
}

impl<T: WhitneyTile> Cover<T> {
    pub fn build<F>(roots: Vec<(T, T)>, floor: u32, max_scale: u32, slack: Slack, filter: F) -> Self
    where
        F: Fn(&T, &T) -> bool + Sync,
    {
        let mut entries = Vec::new();
        refine(roots, max_scale, slack, filter, |e| entries.push(e));
        Self {
            entries,
            floor,
            max_scale,
        }
    }

    pub fn scales(&self) -> Vec<u32> {
        let mut s = Vec::new();
        let mut a = self.floor;
        while a <= self.max_scale {
            s.push(a);
            a *= 2;
        }
        s
    }

    /// Entries whose product contains (p1, p2).
    pub fn locate_pair(&self, p1: [f64; 2], p2: [f64; 2]) -> Vec<&CoverEntry<T>> {
        self.entries
            .iter()
            .filter(|e| rect_contains(&e.t1.rect(), p1) && rect_contains(&e.t2.rect(), p2))
            .collect()
    }

    pub fn index(&self) -> HashMap<(u32, [i64; 2], [i64; 2]), Label> {
        self.entries
            .iter()
            .map(|e| ((e.scale, e.t1.index(), e.t2.index()), e.label))
            .collect()
    }

    /// For each scale, max over one side's tile of the number of partners.
    pub fn multiplicity_profile(&self, side: u8, residual: bool) -> BTreeMap<u32, usize> {
        multiplicity_of(
            self.entries
                .iter()
                .filter(|e| (e.label == Label::Residual) == residual)
                .map(|e| (e.scale, e.t1.index(), e.t2.index())),
            side,
        )
    }
}

fn multiplicity_of<I>(pairs: I, side: u8) -> BTreeMap<u32, usize>
where
    I: Iterator<Item = (u32, [i64; 2], [i64; 2])>,
{
    let mut counts: HashMap<(u32, [i64; 2]), usize> = HashMap::new();
    let mut seen = HashSet::new();
    for (s, a, b) in pairs {
        if !seen.insert((s, a, b)) {
            continue;
        }
        let key = if side == 1 { (s, a) } else { (s, b) };
        *counts.entry(key).or_default() += 1;
    }
    let mut out = BTreeMap::new();
    for ((s, _), c) in counts {
        let e = out.entry(s).or_insert(0);
        *e = (*e).max(c);
    }
    out
}

pub fn max_of(profile: &BTreeMap<u32, usize>) -> usize {
    profile.values().copied().max().unwrap_or(0)
}

/// All square tiles at scale a meeting [−extent, extent]².
pub fn tiles_in_box(a: u32, n1: f64, extent: f64) -> Vec<SquareTile> {
    let s = n1 / a as f64;
    let k = (extent / s).ceil() as i64;
    (-k..k)
        .flat_map(|i| (-k..k).map(move |j| SquareTile::new(a, [i, j], n1)))
        .collect()
}

/// Square-tile Whitney cover of the pairs inside [−extent, extent]⁴
/// accepted by `filter`, from `a_floor` to `a_max`.
pub fn whitney_cover<F>(n1: f64, a_floor: u32, a_max: u32, extent: f64, slack: Slack, filter: F) -> Cover<SquareTile>
where
    F: Fn(&SquareTile, &SquareTile) -> bool + Sync,
{
    assert!(a_max as f64 <= n1, "A_max must not exceed N1");
    let tiles = tiles_in_box(a_floor, n1, extent);
    let roots: Vec<_> = tiles
        .iter()
        .flat_map(|a| tiles.iter().map(move |b| (*a, *b)))
        .filter(|(a, b)| filter(a, b))
        .collect();
    Cover::build(roots, a_floor, a_max, slack, filter)
}

/// ℓ-sector D_j^A: directions within 2π/A of πj/A, modulo π.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AngularSector {
    pub a: u32,
    pub j: u32,
}

impl AngularSector {
    pub fn contains(&self, p: [f64; 2]) -> bool {
        if p[0] == 0.0 && p[1] == 0.0 {
            return true;
        }
        let pi = std::f64::consts::PI;
        let theta = p[1].atan2(p[0]);
        let c = pi * self.j as f64 / self.a as f64;
        let d = (theta - c).rem_euclid(pi);
        let d = d.min(pi - d);
        d <= 2.0 * pi / self.a as f64 + 1e-12
    }
}

pub fn sector_membership(k: [f64; 2], sector: &AngularSector) -> bool {
    sector.contains(k)
}

pub fn sectors_containing(k: [f64; 2], a: u32) -> Vec<u32> {
    (0..a).filter(|&j| AngularSector { a, j }.contains(k)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KStrip {
    K0,
    K1,
    K2,
    K0p,
    K1p,
    K2p,
}

pub fn slope_k0() -> f64 {
    (2f64.sqrt() - 1.0).powf(4.0 / 3.0)
}

pub fn slope_k1() -> f64 {
    (2f64.sqrt() + 1.0).powf(2.0 / 3.0) * (2f64.sqrt() + 3f64.sqrt())
}

pub fn slope_k2() -> f64 {
    -(2f64.sqrt() + 1.0).powf(2.0 / 3.0) * (3f64.sqrt() - 2f64.sqrt())
}

/// Slope of the second family of lines in R_{A,m,i}.
pub fn slope_band() -> f64 {
    (2f64.sqrt() + 1.0).powf(2.0 / 3.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KRegion {
    pub strip: KStrip,
    pub n1: f64,
}

impl KRegion {
    pub fn half_width(&self) -> f64 {
        self.n1 * 2f64.powi(-20)
    }

    pub fn contains(&self, p: [f64; 2]) -> bool {
        let (s, q) = match self.strip {
            KStrip::K0 => (slope_k0(), p),
            KStrip::K1 => (slope_k1(), p),
            KStrip::K2 => (slope_k2(), p),
            KStrip::K0p => (slope_k0(), [p[1], p[0]]),
            KStrip::K1p => (slope_k1(), [p[1], p[0]]),
            KStrip::K2p => (slope_k2(), [p[1], p[0]]),
        };
        (q[1] - s * q[0]).abs() <= self.half_width()
    }

    pub fn contains_rect(&self, r: &Rect) -> bool {
        rect_corners(r).iter().all(|c| self.contains(*c))
    }
}

pub fn kregion_membership(k: [f64; 2], region: &KRegion) -> bool {
    region.contains(k)
}

/// True when r1 × r2 lies inside 𝒦 ∪ 𝒦′ by a tile-wise test (conservative
/// in the direction of "meets the complement").
pub fn product_inside_k(r1: &Rect, r2: &Rect, n1: f64) -> bool {
    let k = |s| KRegion { strip: s, n1 };
    let inside = |r: &Rect, s: &[KStrip]| s.iter().any(|&x| k(x).contains_rect(r));
    use KStrip::*;
    (inside(r1, &[K0]) && inside(r2, &[K1, K2]))
        || (inside(r1, &[K1, K2]) && inside(r2, &[K0]))
        || (inside(r1, &[K0p]) && inside(r2, &[K1p, K2p]))
        || (inside(r1, &[K1p, K2p]) && inside(r2, &[K0p]))
}

/// Region of the square-tile lemma: ℓ₁, ℓ₂ ∈ {r0N₁ ≤ |ℓ| ≤ r1N₁}, ℓ₃ in
/// {N₁/4 ≤ |ℓ| ≤ 2N₁}, |sin∠| ≥ sin_min somewhere, and meeting (𝒦 ∪ 𝒦′)ᶜ.
#[derive(Debug, Clone, Copy)]
pub struct TransverseRegion {
    pub n1: f64,
    pub r0: f64,
    pub r1: f64,
    pub sin_min: f64,
}

impl TransverseRegion {
    pub fn new(n1: f64) -> Self {
        Self {
            n1,
            r0: 0.5,
            r1: 1.0,
            sin_min: 0.25,
        }
    }

    pub fn accepts(&self, a: &Rect, b: &Rect) -> bool {
        let n = self.n1;
        rect_meets_annulus(a, self.r0 * n, self.r1 * n)
            && rect_meets_annulus(b, self.r0 * n, self.r1 * n)
            && rect_meets_annulus(&minkowski_sum(a, b), n / 4.0, 2.0 * n)
            && sampled_max_sin(a, b) >= self.sin_min
            && !product_inside_k(a, b, n)
    }

    pub fn accepts_points(&self, p: [f64; 2], q: [f64; 2]) -> bool {
        let n = self.n1;
        let r = |v: [f64; 2]| v[0].hypot(v[1]);
        let s = [p[0] + q[0], p[1] + q[1]];
        (self.r0 * n..=self.r1 * n).contains(&r(p))
            && (self.r0 * n..=self.r1 * n).contains(&r(q))
            && (n / 4.0..=2.0 * n).contains(&r(s))
            && abs_sin_angle(p, q) >= self.sin_min
    }
}

/// a_{A,n}: a_{A,1} = 0, a_{A,n+1} = a_{A,n} + N₁/√((n+1)A).
pub fn annular_offset(a: u32, n: u32, n1: f64) -> f64 {
    (2..=n).map(|j| n1 / ((j as f64) * a as f64).sqrt()).sum()
}

/// R_{A,m,i} with m = (n, z):
/// a_{A,n} ≤ |η − sᵢξ| < a_{A,n+1} and zN₁/A ≤ η − s′ξ < (z+1)N₁/A.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnnularRectTile {
    pub a: u32,
    pub n: u32,
    pub z: i64,
    pub i: u8,
    pub n1: f64,
}

impl AnnularRectTile {
    pub fn slope(&self) -> f64 {
        annular_slope(self.i)
    }

    pub fn contains(&self, p: [f64; 2]) -> bool {
        let u = (p[1] - self.slope() * p[0]).abs();
        let v = p[1] - slope_band() * p[0];
        let h = self.n1 / self.a as f64;
        u >= annular_offset(self.a, self.n, self.n1)
            && u < annular_offset(self.a, self.n + 1, self.n1)
            && v >= self.z as f64 * h
            && v < (self.z + 1) as f64 * h
    }

    /// The one or two parallelograms making up the region, as vertex lists.
    pub fn pieces(&self) -> Vec<[[f64; 2]; 4]> {
        let lo = annular_offset(self.a, self.n, self.n1);
        let hi = annular_offset(self.a, self.n + 1, self.n1);
        let h = self.n1 / self.a as f64;
        let (v0, v1) = (self.z as f64 * h, (self.z + 1) as f64 * h);
        let s = self.slope();
        let t = slope_band();
        let vert = |u: f64, v: f64| {
            let x = (v - u) / (s - t);
            [x, v + t * x]
        };
        let piece = |u0: f64, u1: f64| [vert(u0, v0), vert(u1, v0), vert(u1, v1), vert(u0, v1)];
        if self.n == 1 {
            vec![piece(-hi, hi)]
        } else {
            vec![piece(lo, hi), piece(-hi, -lo)]
        }
    }

    pub fn bboxes(&self) -> Vec<Rect> {
        self.pieces()
            .iter()
            .map(|p| {
                let xs = p.iter().map(|v| v[0]);
                let ys = p.iter().map(|v| v[1]);
                [
                    xs.clone().fold(f64::INFINITY, f64::min),
                    xs.fold(f64::NEG_INFINITY, f64::max),
                    ys.clone().fold(f64::INFINITY, f64::min),
                    ys.fold(f64::NEG_INFINITY, f64::max),
                ]
            })
            .collect()
    }
}

pub fn annular_slope(i: u8) -> f64 {
    if i == 1 {
        slope_k1()
    } else {
        slope_k2()
    }
}

/// m = (n, z) with k ∈ R_{A,m,i}.
pub fn annular_tile_locate(k: [f64; 2], a: u32, i: u8, n1: f64) -> (u32, i64) {
    let u = (k[1] - annular_slope(i) * k[0]).abs();
    let mut n = 1;
    let mut next = annular_offset(a, 2, n1);
    while u >= next {
        n += 1;
        next += n1 / (((n + 1) as f64) * a as f64).sqrt();
    }
    let z = ((k[1] - slope_band() * k[0]) / (n1 / a as f64)).floor() as i64;
    (n, z)
}

/// R_m^d = d⁻¹N₁⁻²N₃³[m₁, m₁+1) × d⁻¹N₃[m₂, m₂+1).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlatRectTile {
    pub d: u32,
    pub m: [i64; 2],
    pub n1: f64,
    pub n3: f64,
}

impl Eq for FlatRectTile {}

impl Hash for FlatRectTile {
    fn hash<H: std::hash::Hasher>(&self, h: &mut H) {
        self.d.hash(h);
        self.m.hash(h);
        self.n1.to_bits().hash(h);
        self.n3.to_bits().hash(h);
    }
}

impl FlatRectTile {
    pub fn sides(&self) -> (f64, f64) {
        flat_sides(self.d, self.n1, self.n3)
    }
}

fn flat_sides(d: u32, n1: f64, n3: f64) -> (f64, f64) {
    let d = d as f64;
    (n3.powi(3) / (n1 * n1 * d), n3 / d)
}

pub fn flat_tile_locate(k: [f64; 2], d: u32, n1: f64, n3: f64) -> [i64; 2] {
    let (sx, sy) = flat_sides(d, n1, n3);
    [(k[0] / sx).floor() as i64, (k[1] / sy).floor() as i64]
}

impl WhitneyTile for FlatRectTile {
    fn rect(&self) -> Rect {
        let (sx, sy) = self.sides();
        let (x, y) = (self.m[0] as f64 * sx, self.m[1] as f64 * sy);
        [x, x + sx, y, y + sy]
    }
    fn scale(&self) -> u32 {
        self.d
    }
    fn index(&self) -> [i64; 2] {
        self.m
    }
    fn children(&self) -> [Self; 4] {
        let [a, b] = [2 * self.m[0], 2 * self.m[1]];
        let c = |i, j| FlatRectTile {
            d: 2 * self.d,
            m: [a + i, b + j],
            n1: self.n1,
            n3: self.n3,
        };
        [c(0, 0), c(1, 0), c(0, 1), c(1, 1)]
    }
    fn locate_at(&self, p: [f64; 2], scale: u32) -> Self {
        FlatRectTile {
            d: scale,
            m: flat_tile_locate(p, scale, self.n1, self.n3),
            n1: self.n1,
            n3: self.n3,
        }
    }
    fn thresholds(&self) -> (f64, f64) {
        let d = self.d as f64;
        (self.n3.powi(3) / d, self.n1 * self.n3 / d)
    }
}

/// Flat-tile region: the product meets N₁/2 ≤ |ξ₁| ≤ 2N₁ and
/// |η₁| + |η₂| ≤ N₃, and |ξ₁ + ξ₂| ≤ c·N₁⁻²N₃³ on all of it.
#[derive(Debug, Clone, Copy)]
pub struct FlatRegion {
    pub n1: f64,
    pub n3: f64,
    pub xi_sum_c: f64,
}

impl FlatRegion {
    pub fn accepts(&self, a: &Rect, b: &Rect) -> bool {
        let w = self.xi_sum_c * self.n3.powi(3) / (self.n1 * self.n1);
        let eta_min = |r: &Rect| 0f64.clamp(r[2], r[3]).abs();
        let xi_lo = 0f64.clamp(a[0], a[1]).abs();
        let xi_hi = a[0].abs().max(a[1].abs());
        let s = minkowski_sum(a, b);
        xi_hi >= self.n1 / 2.0
            && xi_lo <= 2.0 * self.n1
            && eta_min(a) + eta_min(b) <= self.n3
            && s[0].abs().max(s[1].abs()) <= w
    }
}

/// Flat-tile cover from d_floor to d_max over the flat region.
pub fn flat_cover(region: FlatRegion, d_floor: u32, d_max: u32) -> Cover<FlatRectTile> {
    let (n1, n3) = (region.n1, region.n3);
    let (sx, sy) = flat_sides(d_floor, n1, n3);
    let kx = (2.0 * n1 / sx).ceil() as i64;
    let ky = (n3 / sy).ceil() as i64;
    let tile = |m: [i64; 2]| FlatRectTile { d: d_floor, m, n1, n3 };
    let w = region.xi_sum_c * n3.powi(3) / (n1 * n1);
    let reach = (w / sx).ceil() as i64 + 1;
    let mut roots = Vec::new();
    for i in -kx..kx {
        for j in -ky..ky {
            let t1 = tile([i, j]);
            // partners with ξ₂ ≈ −ξ₁
            for i2 in (-i - 1 - reach)..=(-i - 1 + reach) {
                for j2 in -ky..ky {
                    let t2 = tile([i2, j2]);
                    if region.accepts(&t1.rect(), &t2.rect()) {
                        roots.push((t1, t2));
                    }
                }
            }
        }
    }
    Cover::build(roots, d_floor, d_max, Slack::Interval, |a, b| {
        region.accepts(&a.rect(), &b.rect())
    })
}

/// Multiplicity summary for the annular family at one scale.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AnnularMultiplicity {
    pub a: u32,
    /// new pairs: max #k per m, max #m per k
    pub per_m: usize,
    pub per_k: usize,
    /// unresolved pairs: max #k per m, max #m per k
    pub residual_per_m: usize,
    pub residual_per_k: usize,
    pub new_pairs: usize,
    pub residual_pairs: usize,
}

fn annular_classify(t: &AnnularRectTile, k: &SquareTile) -> PairClass {
    let a = t.a as f64;
    let (tp, tf) = (t.n1.powi(3) / a, t.n1.powi(2) / a);
    let boxes = t.bboxes();
    let all = |poly: PairPoly, thr: f64| {
        boxes
            .iter()
            .all(|b| certified_lower_bound(poly, b, &k.rect(), Slack::Interval) >= thr)
    };
    if all(PairPoly::Phi, tp) {
        PairClass::Z1
    } else if all(PairPoly::F, tf) {
        PairClass::Z2
    } else {
        PairClass::Unresolved
    }
}

fn parallelogram_samples(p: &[[f64; 2]; 4]) -> Vec<[f64; 2]> {
    let mut out = Vec::new();
    for s in [0.02, 0.5, 0.98] {
        for t in [0.02, 0.5, 0.98] {
            let a = [
                p[0][0] + s * (p[1][0] - p[0][0]),
                p[0][1] + s * (p[1][1] - p[0][1]),
            ];
            let b = [
                p[3][0] + s * (p[2][0] - p[3][0]),
                p[3][1] + s * (p[2][1] - p[3][1]),
            ];
            out.push([a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]);
        }
    }
    out
}

/// Annular-tile Whitney data for ℓ₁ ∈ 𝒦ᵢ, ℓ₂ ∈ 𝒦₀ with
/// N₁/2 ≤ |ℓⱼ| ≤ N₁, scales a_floor..=a_max. Pairs are new at A when
/// certified at A and not contained (on a 9×9 sample) in coarser certified
/// products.
pub fn annular_multiplicity(n1: f64, i: u8, a_floor: u32, a_max: u32) -> Vec<AnnularMultiplicity> {
    let ki = KRegion {
        strip: if i == 1 { KStrip::K1 } else { KStrip::K2 },
        n1,
    };
    let k0 = KRegion {
        strip: KStrip::K0,
        n1,
    };
    let line_pts = |s: f64| -> Vec<[f64; 2]> {
        let r = (1.0 + s * s).sqrt();
        (0..=400)
            .map(|j| -1.0 + 2.0 * j as f64 / 400.0)
            .filter(|t: &f64| t.abs() >= 0.5)
            .map(|t| [t * n1 / r, t * n1 * s / r])
            .collect()
    };
    let mut memo: HashMap<(u32, u32, i64, [i64; 2]), PairClass> = HashMap::new();
    let mut out = Vec::new();
    let mut a = a_floor;
    while a <= a_max {
        let hh = n1 / a as f64;
        // annular tiles meeting 𝒦ᵢ near |ℓ| ∈ [N₁/2, N₁]: n = 1, z along the line
        let mut zs: Vec<i64> = line_pts(annular_slope(i))
            .iter()
            .map(|p| annular_tile_locate(*p, a, i, n1).1)
            .collect();
        zs.sort();
        zs.dedup();
        let ms: Vec<AnnularRectTile> = zs
            .iter()
            .map(|&z| AnnularRectTile { a, n: 1, z, i, n1 })
            .collect();
        let mut ks: Vec<SquareTile> = Vec::new();
        for p in line_pts(slope_k0()) {
            let base = SquareTile::locate(p, a, n1);
            for dx in -1..=1 {
                for dy in -1..=1 {
                    let t = SquareTile::new(a, [base.m[0] + dx, base.m[1] + dy], n1);
                    let r = t.rect();
                    let meets = rect_corners(&r).iter().any(|c| k0.contains(*c))
                        || line_crosses_rect(slope_k0(), k0.half_width(), &r);
                    if meets && rect_meets_annulus(&r, n1 / 2.0, n1) {
                        ks.push(t);
                    }
                }
            }
        }
        ks.sort_by_key(|t| t.m);
        ks.dedup();
        let pairs: Vec<(AnnularRectTile, SquareTile)> = ms
            .iter()
            .flat_map(|m| ks.iter().map(move |k| (*m, *k)))
            .collect();
        let classes: Vec<PairClass> = pairs.par_iter().map(|(m, k)| annular_classify(m, k)).collect();
        for ((m, k), c) in pairs.iter().zip(&classes) {
            memo.insert((a, m.n, m.z, k.m), *c);
        }
        let mut new_pairs = Vec::new();
        let mut residual = Vec::new();
        for ((m, k), c) in pairs.iter().zip(classes) {
            let _ = ki;
            if c == PairClass::Unresolved {
                residual.push((a, [m.n as i64, m.z], k.m));
                continue;
            }
            // sampled containment in coarser certified products
            let mut covered = a > a_floor;
            'outer: for piece in m.pieces() {
                for p in parallelogram_samples(&piece) {
                    let kr = k.rect();
                    for q in rect_samples(&[
                        kr[0] + 0.02 * hh,
                        kr[1] - 0.02 * hh,
                        kr[2] + 0.02 * hh,
                        kr[3] - 0.02 * hh,
                    ]) {
                        let mut hit = false;
                        let mut b = a_floor;
                        while b < a {
                            let (n, z) = annular_tile_locate(p, b, i, n1);
                            let kk = SquareTile::locate(q, b, n1);
                            let key = (b, n, z, kk.m);
                            let cls = *memo.entry(key).or_insert_with(|| {
                                annular_classify(&AnnularRectTile { a: b, n, z, i, n1 }, &kk)
                            });
                            if cls != PairClass::Unresolved {
                                hit = true;
                                break;
                            }
                            b *= 2;
                        }
                        if !hit {
                            covered = false;
                            break 'outer;
                        }
                    }
                }
            }
            if !covered {
                new_pairs.push((a, [m.n as i64, m.z], k.m));
            }
        }
        let mx = |v: &Vec<(u32, [i64; 2], [i64; 2])>, side| {
            max_of(&multiplicity_of(v.iter().copied(), side))
        };
        out.push(AnnularMultiplicity {
            a,
            per_m: mx(&new_pairs, 1),
            per_k: mx(&new_pairs, 2),
            residual_per_m: mx(&residual, 1),
            residual_per_k: mx(&residual, 2),
            new_pairs: new_pairs.len(),
            residual_pairs: residual.len(),
        });
        a *= 2;
    }
    out
}

/// Whether the strip |y − s x| ≤ w meets the rectangle.
fn line_crosses_rect(s: f64, w: f64, r: &Rect) -> bool {
    let vals: Vec<f64> = rect_corners(r).iter().map(|c| c[1] - s * c[0]).collect();
    let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    lo <= w && hi >= -w
}
