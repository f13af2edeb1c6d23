//! Thickened hypersurfaces in ℝ³: triple-intersection volumes, the
//! thickened trilinear form on grids, and the restricted-transversality
//! counterexample built from a train of small balls.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, ZkError};
use crate::fft::FftN;
use crate::resonance::det3;
use crate::spectral_lattice::{phi, psi_sym};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum GraphFn {
    /// z = a x + b y + c
    Affine { a: f64, b: f64, c: f64 },
    /// z = sin(πx) + c
    Sinusoid { c: f64 },
    /// z = x³ + x y²
    Psi,
    /// z = x³ + y³
    PsiSym,
}

impl GraphFn {
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        match *self {
            GraphFn::Affine { a, b, c } => a * x + b * y + c,
            GraphFn::Sinusoid { c } => (std::f64::consts::PI * x).sin() + c,
            GraphFn::Psi => phi(x, y),
            GraphFn::PsiSym => psi_sym(x, y),
        }
    }

    pub fn gradient(&self, x: f64, y: f64) -> [f64; 2] {
        let pi = std::f64::consts::PI;
        match *self {
            GraphFn::Affine { a, b, .. } => [a, b],
            GraphFn::Sinusoid { .. } => [pi * (pi * x).cos(), 0.0],
            GraphFn::Psi => [3.0 * x * x + y * y, 2.0 * x * y],
            GraphFn::PsiSym => [3.0 * x * x, 3.0 * y * y],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type")]
pub enum SurfaceKind {
    /// {x·n = c}, n normalized on use
    Plane { normal: [f64; 3], c: f64 },
    Graph { f: GraphFn },
}

/// A surface piece thickened by ε inside an axis-aligned domain box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurfaceSpec {
    pub kind: SurfaceKind,
    pub eps: f64,
    pub domain: [[f64; 2]; 3],
    #[serde(default = "one")]
    pub holder_beta: f64,
    #[serde(default = "one")]
    pub holder_b: f64,
}

fn one() -> f64 {
    1.0
}

fn unit(v: [f64; 3]) -> [f64; 3] {
    let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    [v[0] / n, v[1] / n, v[2] / n]
}

impl SurfaceSpec {
    pub fn plane(normal: [f64; 3], c: f64, eps: f64, domain: [[f64; 2]; 3]) -> Self {
        Self {
            kind: SurfaceKind::Plane { normal, c },
            eps,
            domain,
            holder_beta: 1.0,
            holder_b: 0.0,
        }
    }

    pub fn graph(f: GraphFn, eps: f64, domain: [[f64; 2]; 3]) -> Self {
        Self {
            kind: SurfaceKind::Graph { f },
            eps,
            domain,
            holder_beta: 1.0,
            holder_b: 1.0,
        }
    }

    pub fn in_domain(&self, p: [f64; 3]) -> bool {
        (0..3).all(|i| p[i] >= self.domain[i][0] && p[i] <= self.domain[i][1])
    }

    /// Signed offset from the surface: x·n − c, or z − F(x,y).
    pub fn offset(&self, p: [f64; 3]) -> f64 {
        match self.kind {
            SurfaceKind::Plane { normal, c } => {
                let n = unit(normal);
                p[0] * n[0] + p[1] * n[1] + p[2] * n[2] - c
            }
            SurfaceKind::Graph { f } => p[2] - f.eval(p[0], p[1]),
        }
    }

    pub fn contains(&self, p: [f64; 3]) -> bool {
        self.in_domain(p) && self.offset(p).abs() < self.eps
    }

    pub fn normal_at(&self, p: [f64; 3]) -> [f64; 3] {
        match self.kind {
            SurfaceKind::Plane { normal, .. } => unit(normal),
            SurfaceKind::Graph { f } => {
                let [gx, gy] = f.gradient(p[0], p[1]);
                unit([-gx, -gy, 1.0])
            }
        }
    }

    /// Sup of |∇F| (or 0 for planes) on a sample of the domain.
    pub fn gradient_sup(&self) -> f64 {
        match self.kind {
            SurfaceKind::Plane { .. } => 0.0,
            SurfaceKind::Graph { f } => {
                let mut m: f64 = 0.0;
                for i in 0..=32 {
                    for j in 0..=32 {
                        let x = self.domain[0][0] + (self.domain[0][1] - self.domain[0][0]) * i as f64 / 32.0;
                        let y = self.domain[1][0] + (self.domain[1][1] - self.domain[1][0]) * j as f64 / 32.0;
                        let g = f.gradient(x, y);
                        m = m.max(g[0].hypot(g[1]));
                    }
                }
                m
            }
        }
    }

    /// A random point on the (unthickened) surface inside the domain.
    fn sample_on(&self, rng: &mut ChaCha8Rng) -> Option<[f64; 3]> {
        let d = self.domain;
        for _ in 0..1000 {
            let mut p = [0.0; 3];
            for i in 0..3 {
                p[i] = rng.gen_range(d[i][0]..=d[i][1]);
            }
            match self.kind {
                SurfaceKind::Graph { f } => p[2] = f.eval(p[0], p[1]),
                SurfaceKind::Plane { normal, c } => {
                    let n = unit(normal);
                    let off = p[0] * n[0] + p[1] * n[1] + p[2] * n[2] - c;
                    for i in 0..3 {
                        p[i] -= off * n[i];
                    }
                }
            }
            if self.in_domain(p) {
                return Some(p);
            }
        }
        None
    }
}

/// min |det(n₁,n₂,n₃)| over `samples` random surface triples.
pub fn sampled_min_det(s: [&SurfaceSpec; 3], samples: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut m = f64::INFINITY;
    for _ in 0..samples {
        let p: Vec<_> = s.iter().filter_map(|x| x.sample_on(&mut rng)).collect();
        if p.len() < 3 {
            continue;
        }
        let d = det3(s[0].normal_at(p[0]), s[1].normal_at(p[1]), s[2].normal_at(p[2]));
        m = m.min(d.abs());
    }
    m
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VolumeMethod {
    Grid,
    MonteCarlo,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VolumeEstimate {
    pub volume: f64,
    /// grid: volume of cells whose membership may change inside the cell;
    /// Monte Carlo: one standard error
    pub error: f64,
    pub min_det: f64,
    pub a: f64,
}

fn box_intersection(s: [&SurfaceSpec; 3]) -> [[f64; 2]; 3] {
    let mut b = s[0].domain;
    for x in &s[1..] {
        for (bi, d) in b.iter_mut().zip(&x.domain) {
            bi[0] = bi[0].max(d[0]);
            bi[1] = bi[1].min(d[1]);
        }
    }
    b
}

/// Volume of S₁(ε) ∩ S₂(ε) ∩ S₃(ε). `resolution` is the grid step, or the
/// number of samples for Monte Carlo.
pub fn triple_intersection_volume(
    s1: &SurfaceSpec,
    s2: &SurfaceSpec,
    s3: &SurfaceSpec,
    method: VolumeMethod,
    resolution: f64,
    seed: u64,
) -> Result<VolumeEstimate> {
    let s = [s1, s2, s3];
    let min_det = sampled_min_det(s, 1000, seed);
    if min_det < 1e-6 {
        return Err(ZkError::DegenerateTransversality(min_det));
    }
    let b = box_intersection(s);
    if (0..3).any(|i| b[i][1] <= b[i][0]) {
        return Ok(VolumeEstimate {
            volume: 0.0,
            error: 0.0,
            min_det,
            a: 1.0 / min_det,
        });
    }
    let inside = |p: [f64; 3]| s.iter().all(|x| x.contains(p));
    let (volume, error) = match method {
        VolumeMethod::Grid => {
            let h = resolution;
            let n: Vec<usize> = (0..3).map(|i| ((b[i][1] - b[i][0]) / h).round().max(1.0) as usize).collect();
            let hs: Vec<f64> = (0..3).map(|i| (b[i][1] - b[i][0]) / n[i] as f64).collect();
            let cell = hs[0] * hs[1] * hs[2];
            let half_diag = 0.5 * (hs[0] * hs[0] + hs[1] * hs[1] + hs[2] * hs[2]).sqrt();
            let grads: Vec<f64> = s.iter().map(|x| 1.0 + x.gradient_sup()).collect();
            let (count, edge) = (0..n[0])
                .into_par_iter()
                .map(|i| {
                    let mut c = 0usize;
                    let mut e = 0usize;
                    for j in 0..n[1] {
                        for k in 0..n[2] {
                            let p = [
                                b[0][0] + (i as f64 + 0.5) * hs[0],
                                b[1][0] + (j as f64 + 0.5) * hs[1],
                                b[2][0] + (k as f64 + 0.5) * hs[2],
                            ];
                            if inside(p) {
                                c += 1;
                            }
                            let near = s.iter().zip(&grads).any(|(x, g)| {
                                (x.offset(p).abs() - x.eps).abs() <= g * half_diag
                            });
                            if near && s.iter().zip(&grads).all(|(x, g)| x.offset(p).abs() <= x.eps + g * half_diag) {
                                e += 1;
                            }
                        }
                    }
                    (c, e)
                })
                .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1));
            (count as f64 * cell, edge as f64 * cell)
        }
        VolumeMethod::MonteCarlo => {
            let n = resolution as usize;
            let vol_box: f64 = (0..3).map(|i| b[i][1] - b[i][0]).product();
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
            let mut hits = 0usize;
            for _ in 0..n {
                let p = [
                    rng.gen_range(b[0][0]..b[0][1]),
                    rng.gen_range(b[1][0]..b[1][1]),
                    rng.gen_range(b[2][0]..b[2][1]),
                ];
                if inside(p) {
                    hits += 1;
                }
            }
            let q = hits as f64 / n as f64;
            (q * vol_box, vol_box * (q * (1.0 - q) / n as f64).sqrt())
        }
    };
    Ok(VolumeEstimate {
        volume,
        error,
        min_det,
        a: 1.0 / min_det,
    })
}

/// Samples on the cell-centered grid origin + (i + 1/2)·h.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid3 {
    pub n: [usize; 3],
    pub h: f64,
    pub origin: [f64; 3],
    pub values: Vec<f64>,
}

impl Grid3 {
    pub fn sample<F: Fn([f64; 3]) -> f64 + Sync>(lo: [f64; 3], hi: [f64; 3], h: f64, f: F) -> Self {
        let n = [0, 1, 2].map(|i| ((hi[i] - lo[i]) / h).ceil().max(1.0) as usize);
        let values = (0..n[0] * n[1] * n[2])
            .into_par_iter()
            .map(|idx| {
                let (i, j, k) = (idx / (n[1] * n[2]), (idx / n[2]) % n[1], idx % n[2]);
                f([
                    lo[0] + (i as f64 + 0.5) * h,
                    lo[1] + (j as f64 + 0.5) * h,
                    lo[2] + (k as f64 + 0.5) * h,
                ])
            })
            .collect();
        Self { n, h, origin: lo, values }
    }

    pub fn point(&self, i: usize, j: usize, k: usize) -> [f64; 3] {
        [
            self.origin[0] + (i as f64 + 0.5) * self.h,
            self.origin[1] + (j as f64 + 0.5) * self.h,
            self.origin[2] + (k as f64 + 0.5) * self.h,
        ]
    }

    pub fn l2_norm(&self) -> f64 {
        (self.values.iter().map(|v| v * v).sum::<f64>() * self.h.powi(3)).sqrt()
    }

    fn get(&self, i: i64, j: i64, k: i64) -> f64 {
        if i < 0 || j < 0 || k < 0 {
            return 0.0;
        }
        let (i, j, k) = (i as usize, j as usize, k as usize);
        if i >= self.n[0] || j >= self.n[1] || k >= self.n[2] {
            return 0.0;
        }
        self.values[(i * self.n[1] + j) * self.n[2] + k]
    }

    /// Nonzero samples lie inside `s`.
    pub fn supported_in(&self, s: &SurfaceSpec) -> bool {
        (0..self.n[0]).all(|i| {
            (0..self.n[1]).all(|j| {
                (0..self.n[2]).all(|k| self.get(i as i64, j as i64, k as i64) == 0.0 || s.contains(self.point(i, j, k)))
            })
        })
    }
}

/// ∫(f₁*f₂) f₃ dx on cell-centered grids of a common step, by a padded FFT
/// convolution. f₃'s origin must sit on the sum grid of f₁ and f₂.
pub fn grid_trilinear(f1: &Grid3, f2: &Grid3, f3: &Grid3) -> Result<f64> {
    let h = f1.h;
    if f2.h != h || f3.h != h {
        return Err(ZkError::InvalidArgument("grid steps differ".into()));
    }
    // sum of centers (i+½)h + (j+½)h lands on (i+j+1)h + o₁ + o₂
    let so = [0, 1, 2].map(|a| f1.origin[a] + f2.origin[a] + 0.5 * h);
    let mut shift = [0i64; 3];
    for a in 0..3 {
        let s = (f3.origin[a] - so[a]) / h;
        if (s - s.round()).abs() > 1e-6 {
            return Err(ZkError::InvalidArgument("f3 grid is not aligned with f1+f2".into()));
        }
        shift[a] = s.round() as i64;
    }
    let m = [0, 1, 2].map(|a| (f1.n[a] + f2.n[a] - 1).next_power_of_two());
    let fft = FftN::new(&m);
    let load = |g: &Grid3| {
        let mut d = vec![Complex64::new(0.0, 0.0); m[0] * m[1] * m[2]];
        for i in 0..g.n[0] {
            for j in 0..g.n[1] {
                for k in 0..g.n[2] {
                    d[(i * m[1] + j) * m[2] + k] = Complex64::new(g.values[(i * g.n[1] + j) * g.n[2] + k], 0.0);
                }
            }
        }
        d
    };
    let mut a = load(f1);
    let mut b = load(f2);
    fft.forward(&mut a);
    fft.forward(&mut b);
    for (x, y) in a.iter_mut().zip(&b) {
        *x *= y;
    }
    fft.inverse(&mut a);
    let norm = (m[0] * m[1] * m[2]) as f64;
    let mut total = 0.0;
    // conv index q has center o₁+o₂+(q+1)h = f₃ index q − shift
    for i in 0..m[0] {
        for j in 0..m[1] {
            for k in 0..m[2] {
                let v3 = f3.get(i as i64 - shift[0], j as i64 - shift[1], k as i64 - shift[2]);
                if v3 != 0.0 {
                    total += a[(i * m[1] + j) * m[2] + k].re / norm * v3;
                }
            }
        }
    }
    Ok(total * h.powi(6))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrilinearEstimate {
    pub value: f64,
    pub norms: [f64; 3],
    pub a: f64,
    pub eps: f64,
    pub ratio: f64,
}

/// The thickened trilinear form for grid samples supported in Sᵢ(ε), with
/// ratio value/(ε^{3/2}A^{1/2}Π‖fᵢ‖).
pub fn thickened_trilinear(
    f: [&Grid3; 3],
    s: [&SurfaceSpec; 3],
    seed: u64,
) -> Result<TrilinearEstimate> {
    let eps = s.iter().map(|x| x.eps).fold(f64::INFINITY, f64::min);
    if f[0].h > eps / 4.0 {
        return Err(ZkError::GridTooCoarse {
            step: f[0].h,
            limit: eps / 4.0,
        });
    }
    for (g, x) in f.iter().zip(&s) {
        if !g.supported_in(x) {
            return Err(ZkError::InvalidArgument("sample outside the thickened surface".into()));
        }
    }
    let min_det = sampled_min_det(s, 1000, seed);
    if min_det < 1e-6 {
        return Err(ZkError::DegenerateTransversality(min_det));
    }
    let value = grid_trilinear(f[0], f[1], f[2])?;
    let norms = [f[0].l2_norm(), f[1].l2_norm(), f[2].l2_norm()];
    let a = 1.0 / min_det;
    let ratio = value / (eps.powf(1.5) * a.sqrt() * norms.iter().product::<f64>());
    Ok(TrilinearEstimate {
        value,
        norms,
        a,
        eps,
        ratio,
    })
}

pub const BALL_RADIUS: f64 = 1.0 / 1024.0;
pub const COUNTEREXAMPLE_EPS: f64 = 1.0 / 32.0;

/// 𝒯_R = ⋃_{|k| ≤ R} B((k,0,0), 2⁻¹⁰).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BallTrain {
    pub r: u32,
}

impl BallTrain {
    pub fn contains(&self, p: [f64; 3]) -> bool {
        let k = p[0].round();
        k.abs() <= self.r as f64
            && (p[0] - k).powi(2) + p[1] * p[1] + p[2] * p[2] < BALL_RADIUS * BALL_RADIUS
    }

    /// #{(j,k): |j|, |k|, |j+k| ≤ R} = 3R² + 3R + 1
    pub fn triple_count(&self) -> u64 {
        let r = self.r as i64;
        let mut c = 0;
        for j in -r..=r {
            for k in -r..=r {
                if (j + k).abs() <= r {
                    c += 1;
                }
            }
        }
        c
    }
}

/// The three thickened families S₁(2⁻⁵) = {|y|,|z| < 2⁻⁵} (planes z = c₁),
/// S₂(2⁻⁵) = {|y|,|z| < 2⁻⁵} (planes y = c₂) and S₃(2⁻⁵) = {|z − sin πx| < 2⁻⁵}.
pub fn counterexample_contains(i: usize, p: [f64; 3]) -> bool {
    let e = COUNTEREXAMPLE_EPS;
    match i {
        0 | 1 => p[1].abs() < e && p[2].abs() < e,
        _ => (p[2] - (std::f64::consts::PI * p[0]).sin()).abs() < e,
    }
}

fn counterexample_normals(l3: [f64; 3]) -> [[f64; 3]; 3] {
    let s3 = SurfaceSpec::graph(GraphFn::Sinusoid { c: 0.0 }, COUNTEREXAMPLE_EPS, [[-1e9, 1e9]; 3]);
    [[0.0, 0.0, 1.0], [0.0, 1.0, 0.0], s3.normal_at(l3)]
}

/// min |det 𝔫| over `samples` triples λ₁ ∈ S₁^{c₁}, λ₂ ∈ S₂^{c₂} with
/// λ₃ = λ₁ + λ₂ ∈ S₃^{c₃}, |cᵢ| < 2⁻⁵ (rejection sampling).
pub fn convolution_constrained_min_det(samples: usize, extent: f64, seed: u64) -> f64 {
    let e = COUNTEREXAMPLE_EPS;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut m = f64::INFINITY;
    let mut got = 0;
    while got < samples {
        let l1 = [rng.gen_range(-extent..extent), rng.gen_range(-e..e), rng.gen_range(-e..e)];
        let l2 = [rng.gen_range(-extent..extent), rng.gen_range(-e..e), rng.gen_range(-e..e)];
        let l3 = [l1[0] + l2[0], l1[1] + l2[1], l1[2] + l2[2]];
        if !counterexample_contains(2, l3) {
            continue;
        }
        got += 1;
        let n = counterexample_normals(l3);
        m = m.min(det3(n[0], n[1], n[2]).abs());
    }
    m
}

/// min |det 𝔫| over unconstrained triples from the three families.
pub fn product_min_det(samples: usize, extent: f64, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut m = f64::INFINITY;
    for _ in 0..samples {
        let l3 = [rng.gen_range(-extent..extent), 0.0, 0.0];
        let n = counterexample_normals(l3);
        m = m.min(det3(n[0], n[1], n[2]).abs());
    }
    m
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CounterexampleReport {
    pub r: u32,
    pub eps: f64,
    pub value: f64,
    pub norm_product: f64,
    pub ratio: f64,
    pub single_ball_value: f64,
    pub ball_volume: f64,
    pub constrained_min_det: f64,
}

/// Grid data for one ball: (I₀ = ∫(χ_B*χ_B)χ_B, |B|).
pub fn single_ball_integrals(step: f64) -> Result<(f64, f64)> {
    if step > COUNTEREXAMPLE_EPS / 4.0 {
        return Err(ZkError::GridTooCoarse {
            step,
            limit: COUNTEREXAMPLE_EPS / 4.0,
        });
    }
    let r = BALL_RADIUS;
    let ball = |p: [f64; 3]| if p[0] * p[0] + p[1] * p[1] + p[2] * p[2] < r * r { 1.0 } else { 0.0 };
    let lo = [-r; 3];
    let hi = [r; 3];
    let n = ((2.0 * r) / step).round();
    let h = 2.0 * r / n;
    let g = Grid3::sample(lo, hi, h, ball);
    // the sum grid of g with itself starts at −2r + h/2
    let g3 = Grid3::sample([-r - h / 2.0; 3], [r + h / 2.0; 3], h, ball);
    let i0 = grid_trilinear(&g, &g, &g3)?;
    let vol = g.values.iter().sum::<f64>() * h.powi(3);
    Ok((i0, vol))
}

/// |∫(χ_𝒯 * χ_𝒯) χ_𝒯| / Π‖χ_𝒯‖ for the ball train. Translates of one ball on
/// the integer grid interact only through centers j + k = l, so the value
/// is (3R²+3R+1)·I₀ with I₀ and |B| from a local grid of the given step.
pub fn restricted_transversality_counterexample(r: u32, step: f64, seed: u64) -> Result<CounterexampleReport> {
    let (i0, vol) = single_ball_integrals(step)?;
    let train = BallTrain { r };
    let value = train.triple_count() as f64 * i0;
    let norm = ((2 * r + 1) as f64 * vol).sqrt();
    let norm_product = norm.powi(3);
    Ok(CounterexampleReport {
        r,
        eps: COUNTEREXAMPLE_EPS,
        value,
        norm_product,
        ratio: value / norm_product,
        single_ball_value: i0,
        ball_volume: vol,
        constrained_min_det: convolution_constrained_min_det(1000, r as f64 + 1.0, seed),
    })
}

/// Least-squares slope of log y against log x.
pub fn fitted_exponent(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}
