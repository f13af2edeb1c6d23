//! Lattice points in slanted strips and rectangles, the Liouville
//! certificate for √3 and the ℤ/λ × √3ℤ/λ counterexample.

use serde::{Deserialize, Serialize};

use crate::error::{Result, ZkError};
use crate::spectral_lattice::{DualLattice, SymmetrizerMap};

pub const GUARD: f64 = 1e-9;

fn sqrt3() -> f64 {
    3f64.sqrt()
}

/// S^α_{ℓ,w} = {c₁v₁ + c₂v₂ : |c₁| ≤ ℓ, |c₂| ≤ w} − α with v₁ = (1,√3),
/// v₂ = (−1,√3).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Strip {
    pub ell: f64,
    pub w: f64,
    pub alpha: [f64; 2],
}

impl Strip {
    pub fn new(ell: f64, w: f64, alpha: [f64; 2]) -> Result<Self> {
        if !(ell > 0.0 && w > 0.0) {
            return Err(ZkError::InvalidArgument("strip half-widths must be positive".into()));
        }
        Ok(Self { ell, w, alpha })
    }

    /// (c₁, c₂) with p + α = c₁v₁ + c₂v₂.
    pub fn coefficients(&self, p: [f64; 2]) -> [f64; 2] {
        let x = p[0] + self.alpha[0];
        let y = (p[1] + self.alpha[1]) / sqrt3();
        [(x + y) / 2.0, (y - x) / 2.0]
    }

    pub fn contains(&self, p: [f64; 2]) -> bool {
        let [c1, c2] = self.coefficients(p);
        c1.abs() <= self.ell + GUARD && c2.abs() <= self.w + GUARD
    }

    pub fn area(&self) -> f64 {
        8.0 * sqrt3() * self.ell * self.w
    }

    /// Bounding box [x0, x1] × [y0, y1].
    pub fn bbox(&self) -> [f64; 4] {
        let hx = self.ell + self.w + GUARD;
        let hy = sqrt3() * (self.ell + self.w + GUARD);
        [
            -hx - self.alpha[0],
            hx - self.alpha[0],
            -hy - self.alpha[1],
            hy - self.alpha[1],
        ]
    }

    /// Closed y-interval of the strip over the vertical line at x.
    fn column(&self, x: f64) -> Option<(f64, f64)> {
        let s = sqrt3();
        let xx = x + self.alpha[0];
        let (l, w) = (self.ell + GUARD, self.w + GUARD);
        let lo = (s * (-2.0 * l - xx)).max(s * (xx - 2.0 * w)) - self.alpha[1];
        let hi = (s * (2.0 * l - xx)).min(s * (xx + 2.0 * w)) - self.alpha[1];
        (lo <= hi).then_some((lo, hi))
    }
}

fn check_box(bbox: [f64; 4], limit: f64) -> Result<()> {
    let m = bbox.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if m > limit {
        return Err(ZkError::TruncationExceeded {
            needed: m.ceil() as i64,
            have: limit as i64,
        });
    }
    Ok(())
}

/// Count of lattice points (a/λ, c·b/λ) in the strip, column by column,
/// each candidate confirmed by the exact membership test.
fn count_columns(strip: &Strip, lambda: u32, c: f64, radius: f64) -> Result<u64> {
    let bb = strip.bbox();
    check_box(bb, radius)?;
    let l = lambda as f64;
    let a0 = (bb[0] * l).floor() as i64;
    let a1 = (bb[1] * l).ceil() as i64;
    let mut total = 0u64;
    for a in a0..=a1 {
        let x = a as f64 / l;
        let Some((lo, hi)) = strip.column(x) else {
            continue;
        };
        let b0 = (lo * l / c).floor() as i64 - 1;
        let b1 = (hi * l / c).ceil() as i64 + 1;
        total += (b0..=b1)
            .filter(|&b| strip.contains([x, c * b as f64 / l]))
            .count() as u64;
    }
    Ok(total)
}

pub fn count_strip(strip: &Strip, lattice: &DualLattice) -> Result<u64> {
    count_columns(strip, lattice.lambda, 1.0, lattice.radius as f64)
}

/// Plain scan of every lattice point in the bounding box.
pub fn count_strip_bruteforce(strip: &Strip, lattice: &DualLattice) -> Result<u64> {
    let bb = strip.bbox();
    check_box(bb, lattice.radius as f64)?;
    let l = lattice.lambda as f64;
    let (a0, a1) = ((bb[0] * l).floor() as i64, (bb[1] * l).ceil() as i64);
    let (b0, b1) = ((bb[2] * l).floor() as i64, (bb[3] * l).ceil() as i64);
    let mut n = 0;
    for a in a0..=a1 {
        for b in b0..=b1 {
            if strip.contains([a as f64 / l, b as f64 / l]) {
                n += 1;
            }
        }
    }
    Ok(n)
}

/// Count over ℤ/λ × √3ℤ/λ, searched inside |k| ≤ radius.
pub fn count_strip_irrational_torus(strip: &Strip, lambda: u32, radius: u32) -> Result<u64> {
    count_columns(strip, lambda, sqrt3(), radius as f64)
}

/// |√3 − p/q|·q²
pub fn liouville_certificate(q: u64, p: i64) -> f64 {
    assert!(q >= 1);
    let qf = q as f64;
    (sqrt3() - p as f64 / qf).abs() * qf * qf
}

/// min over 1 ≤ q ≤ q_max of the certificate at the nearest p, with its argmin.
pub fn liouville_floor(q_max: u64) -> (f64, u64, i64) {
    (1..=q_max)
        .map(|q| {
            let p = (sqrt3() * q as f64).round() as i64;
            (liouville_certificate(q, p), q, p)
        })
        .fold((f64::INFINITY, 0, 0), |a, b| if b.0 < a.0 { b } else { a })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RectLattice {
    /// ℤ²/λ
    Plain,
    /// M(ℤ²/λ)
    Symmetrized,
}

/// R^α_{c₁,c₂} = {|ξ| ≤ c₁, |η| ≤ c₂} − α.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AxisRectangle {
    pub c1: f64,
    pub c2: f64,
    pub alpha: [f64; 2],
    pub kind: RectLattice,
}

impl AxisRectangle {
    pub fn contains(&self, p: [f64; 2]) -> bool {
        (p[0] + self.alpha[0]).abs() <= self.c1 + GUARD
            && (p[1] + self.alpha[1]).abs() <= self.c2 + GUARD
    }

    fn corners(&self) -> [[f64; 2]; 4] {
        let (x, y) = (self.c1 + GUARD, self.c2 + GUARD);
        let (ax, ay) = (self.alpha[0], self.alpha[1]);
        [
            [-x - ax, -y - ay],
            [x - ax, -y - ay],
            [-x - ax, y - ay],
            [x - ax, y - ay],
        ]
    }
}

pub fn count_rectangle(rect: &AxisRectangle, lattice: &DualLattice) -> Result<u64> {
    if !(rect.c1 > 0.0 && rect.c2 > 0.0) {
        return Err(ZkError::InvalidArgument("rectangle half-widths must be positive".into()));
    }
    let m = SymmetrizerMap::default();
    let pre: Vec<[f64; 2]> = match rect.kind {
        RectLattice::Plain => rect.corners().to_vec(),
        RectLattice::Symmetrized => rect.corners().iter().map(|c| m.apply_inverse(*c)).collect(),
    };
    let bb = [
        pre.iter().map(|p| p[0]).fold(f64::INFINITY, f64::min),
        pre.iter().map(|p| p[0]).fold(f64::NEG_INFINITY, f64::max),
        pre.iter().map(|p| p[1]).fold(f64::INFINITY, f64::min),
        pre.iter().map(|p| p[1]).fold(f64::NEG_INFINITY, f64::max),
    ];
    check_box(bb, lattice.radius as f64)?;
    let l = lattice.lambda as f64;
    let mut n = 0;
    for a in (bb[0] * l).floor() as i64..=(bb[1] * l).ceil() as i64 {
        for b in (bb[2] * l).floor() as i64..=(bb[3] * l).ceil() as i64 {
            let k = [a as f64 / l, b as f64 / l];
            let p = match rect.kind {
                RectLattice::Plain => k,
                RectLattice::Symmetrized => m.apply(k),
            };
            if rect.contains(p) {
                n += 1;
            }
        }
    }
    Ok(n)
}
