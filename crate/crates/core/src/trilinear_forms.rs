//! Trilinear convolution forms over ℝ × ℤ²/λ for inputs of tensor type
//! f(τ,k) = g(k)·1{|τ − symbol(k)| ≤ L}, their norms, the constants C and
//! C̃, and randomized bound sweeps.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, ZkError};
use crate::resonance::{det3, surface_normal, zk_transversality, SurfacePoint};
use crate::spectral_lattice::{DualLattice, FreqIndex, GridFunction, Symbol};

pub fn bracket(x: f64) -> f64 {
    (1.0 + x * x).sqrt()
}

fn sorted3(a: f64, b: f64, c: f64) -> [f64; 3] {
    let mut v = [a, b, c];
    v.sort_by(|x, y| x.partial_cmp(y).unwrap());
    v
}

/// ∫₀^y of the trapezoid |[−a,a] ∩ [u−b,u+b]|, a ≤ b, y ≥ 0.
fn trapezoid_primitive(a: f64, b: f64, y: f64) -> f64 {
    let (p, q) = (b - a, a + b);
    if y <= p {
        2.0 * a * y
    } else if y <= q {
        2.0 * a * p + q * (y - p) - (y * y - p * p) / 2.0
    } else {
        2.0 * a * b
    }
}

/// Area of {|s₁| ≤ L₁, |s₂| ≤ L₂, |s₁ + s₂ + Φ| ≤ L₃}.
pub fn overlap_kernel(phi: f64, l1: f64, l2: f64, l3: f64) -> f64 {
    let (a, b) = if l1 <= l2 { (l1, l2) } else { (l2, l1) };
    let g = |x: f64| x.signum() * trapezoid_primitive(a, b, x.abs());
    let phi = phi.abs();
    (g(l3 - phi) - g(-l3 - phi)).max(0.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModFunction {
    pub g: GridFunction,
    pub l: f64,
    pub symbol: Symbol,
    pub shell: Option<u32>,
}

impl ModFunction {
    pub fn new(g: GridFunction, l: f64, symbol: Symbol) -> Result<Self> {
        if l.is_nan() || l <= 0.0 {
            return Err(ZkError::InvalidArgument(format!("modulation width {l}")));
        }
        Ok(Self {
            g,
            l,
            symbol,
            shell: None,
        })
    }

    pub fn lattice(&self) -> DualLattice {
        self.g.lattice
    }

    fn symbol_at(&self, k: FreqIndex) -> f64 {
        let [x, y] = k.coords();
        self.symbol.eval(x, y)
    }

    pub fn support_size(&self) -> usize {
        self.g.entries().len()
    }
}

/// (λ⁻² Σ_k |g(k)|²·2L)^{1/2}
pub fn mod_norm(f: &ModFunction) -> f64 {
    f.g.l2_norm() * (2.0 * f.l).sqrt()
}

fn check_compatible(f1: &ModFunction, f2: &ModFunction, f3: &ModFunction) -> Result<()> {
    if f1.lattice().lambda != f2.lattice().lambda
        || f1.lattice().lambda != f3.lattice().lambda
        || f1.symbol != f2.symbol
        || f1.symbol != f3.symbol
    {
        return Err(ZkError::LatticeMismatch);
    }
    Ok(())
}

fn weighted_sum<W>(f1: &ModFunction, f2: &ModFunction, f3: &ModFunction, weight: W) -> Result<f64>
where
    W: Fn(FreqIndex, FreqIndex, FreqIndex) -> f64 + Sync,
{
    check_compatible(f1, f2, f3)?;
    let e1 = f1.g.entries();
    let e2 = f2.g.entries();
    let (l1, l2, l3) = (f1.l, f2.l, f3.l);
    let s: f64 = e1
        .par_iter()
        .map(|(k1, g1)| {
            let p1 = f1.symbol_at(*k1);
            let mut acc = 0.0;
            for (k2, g2) in &e2 {
                let k3 = *k1 + *k2;
                let g3 = f3.g.get(k3);
                if g3.re == 0.0 && g3.im == 0.0 {
                    continue;
                }
                let phi = p1 + f2.symbol_at(*k2) - f3.symbol_at(k3);
                let kern = overlap_kernel(phi, l1, l2, l3);
                if kern > 0.0 {
                    acc += (g1 * g2 * g3).re * kern * weight(*k1, *k2, k3);
                }
            }
            acc
        })
        .collect::<Vec<f64>>()
        // summed in a fixed order so the result does not depend on the pool size
        .iter()
        .sum();
    let lam = f1.lattice().lambda as f64;
    Ok(s / lam.powi(4))
}

/// ∫_* f₁(τ₁,k₁) f₂(τ₂,k₂) f₃(τ₁+τ₂,k₁+k₂) (dσ₁)_λ (dσ₂)_λ, exact in τ.
pub fn trilinear_form(f1: &ModFunction, f2: &ModFunction, f3: &ModFunction) -> Result<f64> {
    weighted_sum(f1, f2, f3, |_, _, _| 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Weight {
    /// |k₃,₁| + |k₁,₁|·N₃/N₁
    ShortTime { n1: f64, n3: f64 },
    /// k₃,₁ + k₃,₂, the symmetrized derivative
    Symmetrized,
}

impl Weight {
    pub fn eval(&self, k1: FreqIndex, k3: FreqIndex) -> f64 {
        match *self {
            Weight::ShortTime { n1, n3 } => k3.xi().abs() + k1.xi().abs() * n3 / n1,
            Weight::Symmetrized => k3.xi() + k3.eta(),
        }
    }
}

pub fn weighted_trilinear_form(f1: &ModFunction, f2: &ModFunction, f3: &ModFunction, w: Weight) -> Result<f64> {
    weighted_sum(f1, f2, f3, |k1, _, k3| w.eval(k1, k3))
}

/// N₃^{1+ε} L_min^{1/2} ⟨N₁^{−1/2} L_max^{1/2}⟩
pub fn short_time_bound(n1: f64, n3: f64, ls: [f64; 3], eps: f64) -> f64 {
    let [lmin, _, lmax] = sorted3(ls[0], ls[1], ls[2]);
    n3.powf(1.0 + eps) * lmin.sqrt() * bracket((lmax / n1).sqrt())
}

/// L_min^{1/2} ⟨N L_med⟩^{1/2} ⟨A N L_max⟩^{1/2}
pub fn constant_c(a: f64, n: f64, l1: f64, l2: f64, l3: f64) -> f64 {
    let [lmin, lmed, lmax] = sorted3(l1, l2, l3);
    lmin.sqrt() * bracket(n * lmed).sqrt() * bracket(a * n * lmax).sqrt()
}

/// L_min^{1/2} ⟨L_med N₁⁻²⟩^{1/2} ⟨A L_max N₁⁻²⟩^{1/2}
pub fn constant_c_tilde(a: f64, n1: f64, l1: f64, l2: f64, l3: f64) -> f64 {
    let [lmin, lmed, lmax] = sorted3(l1, l2, l3);
    let n2 = n1 * n1;
    lmin.sqrt() * bracket(lmed / n2).sqrt() * bracket(a * lmax / n2).sqrt()
}

/// Two-regime form of C.
pub fn constant_c_piecewise(a: f64, n: f64, l1: f64, l2: f64, l3: f64) -> f64 {
    let [lmin, lmed, lmax] = sorted3(l1, l2, l3);
    if lmed <= 1.0 / n {
        lmin.sqrt() * bracket(a * n * lmax).sqrt()
    } else {
        (a * l1 * l2 * l3).sqrt() * n
    }
}

/// (P·L_min)^{1/2}/λ · Π‖fᵢ‖ with P the smallest spatial support.
pub fn cauchy_schwarz_bound(f1: &ModFunction, f2: &ModFunction, f3: &ModFunction) -> f64 {
    let p = f1.support_size().min(f2.support_size()).min(f3.support_size()) as f64;
    let lmin = f1.l.min(f2.l).min(f3.l);
    let lam = f1.lattice().lambda as f64;
    (p * lmin).sqrt() / lam * mod_norm(f1) * mod_norm(f2) * mod_norm(f3)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrilinearReport {
    pub value: f64,
    pub norms: [f64; 3],
    pub bound: f64,
    pub ratio: f64,
    pub n: [f64; 3],
    pub l: [f64; 3],
    pub a: f64,
    pub lambda: u32,
    pub tag: String,
}

impl TrilinearReport {
    pub const CSV_HEADER: &'static str = "value,norm1,norm2,norm3,C,ratio,N1,N2,N3,L1,L2,L3,A,lambda,tag";

    pub fn csv_row(&self) -> String {
        let f = |x: f64| format!("{x:.16e}");
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            f(self.value),
            f(self.norms[0]),
            f(self.norms[1]),
            f(self.norms[2]),
            f(self.bound),
            f(self.ratio),
            f(self.n[0]),
            f(self.n[1]),
            f(self.n[2]),
            f(self.l[0]),
            f(self.l[1]),
            f(self.l[2]),
            f(self.a),
            self.lambda,
            self.tag
        )
    }
}

/// Single-mode triple (N,−N), (N,2N), (2N,N) on ψ̃ at λ = 1.
pub fn sharpness_triple(n: i64, ls: [f64; 3]) -> Result<[ModFunction; 3]> {
    let lat = DualLattice::new(1, (2 * n + 1) as u32)?;
    let modes = [(n, -n), (n, 2 * n), (2 * n, n)];
    let mut out = Vec::new();
    for (i, (a, b)) in modes.iter().enumerate() {
        let mut g = GridFunction::zeros(lat);
        g.set(lat.point(*a, *b), Complex64::new(1.0, 0.0))?;
        out.push(ModFunction::new(g, ls[i], Symbol::PsiSym)?);
    }
    Ok([out[0].clone(), out[1].clone(), out[2].clone()])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepKind {
    /// ψ̃ on ℤ²/N with C and the N-weights of the lattice inequality
    PeriodicNlw,
    /// φ on ℤ² with C̃ under the ZK transversality and regularity hypotheses
    NlwZk,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub kind: SweepKind,
    pub n_values: Vec<u32>,
    pub instances_per_n: usize,
    #[serde(default = "default_patch")]
    pub patch: f64,
    #[serde(default = "default_a_max")]
    pub a_max: f64,
    #[serde(default = "default_attempts")]
    pub max_attempts: usize,
    /// place the patch centers on the zero-resonance set
    #[serde(default = "default_resonant")]
    pub resonant: bool,
}

fn default_resonant() -> bool {
    true
}

fn default_patch() -> f64 {
    1.0 / 16.0
}

fn default_a_max() -> f64 {
    16.0
}

fn default_attempts() -> usize {
    64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepOutcome {
    pub reports: Vec<TrilinearReport>,
    pub skipped: usize,
    pub attempted: usize,
}

impl SweepOutcome {
    pub fn max_ratio_at(&self, n: f64) -> f64 {
        self.reports
            .iter()
            .filter(|r| r.n[0] == n)
            .map(|r| r.ratio)
            .fold(0.0, f64::max)
    }
}

/// Per-instance generator: ChaCha8 seeded with the master seed, stream i.
pub fn instance_rng(seed: u64, i: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(i);
    r
}

fn dyadic_ceil(x: f64) -> f64 {
    2f64.powi(x.max(1.0).log2().ceil() as i32)
}

fn patch_points(center: [f64; 2], radius: f64, lambda: u32) -> Vec<FreqIndex> {
    let lam = lambda as f64;
    let (ca, cb) = (center[0] * lam, center[1] * lam);
    let r = radius * lam;
    let (a0, a1) = ((ca - r).ceil() as i64, (ca + r).floor() as i64);
    let (b0, b1) = ((cb - r).ceil() as i64, (cb + r).floor() as i64);
    let mut out = Vec::new();
    for a in a0..=a1 {
        for b in b0..=b1 {
            if (a as f64 - ca).hypot(b as f64 - cb) <= r {
                out.push(FreqIndex::new(a, b, lambda));
            }
        }
    }
    if out.is_empty() {
        out.push(FreqIndex::new(ca.round() as i64, cb.round() as i64, lambda));
    }
    out
}

fn random_mod(rng: &mut ChaCha8Rng, pts: &[FreqIndex], lat: DualLattice, l: f64, symbol: Symbol) -> Result<ModFunction> {
    let mut g = GridFunction::zeros(lat);
    for k in pts {
        g.set(*k, Complex64::new(rng.gen_range(0.1..1.0), 0.0))?;
    }
    ModFunction::new(g, l, symbol)
}

fn random_point(rng: &mut ChaCha8Rng, r0: f64, r1: f64) -> [f64; 2] {
    let r = rng.gen_range(r0..r1);
    let t: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
    [r * t.cos(), r * t.sin()]
}

/// Partner r·e of c with zero resonance; both resonance functions factor as
/// r(α + βr) along a ray.
fn resonant_partner(c: [f64; 2], e: [f64; 2], symbol: Symbol) -> Option<f64> {
    let [x, y] = c;
    let (alpha, beta) = match symbol {
        Symbol::PsiSym => (x * x * e[0] + y * y * e[1], x * e[0] * e[0] + y * e[1] * e[1]),
        Symbol::Phi => (
            3.0 * x * x * e[0] + 2.0 * x * y * e[1] + y * y * e[0],
            3.0 * x * e[0] * e[0] + x * e[1] * e[1] + 2.0 * y * e[0] * e[1],
        ),
    };
    (beta != 0.0).then(|| -alpha / beta)
}

fn centers(rng: &mut ChaCha8Rng, r0: f64, r1: f64, symbol: Symbol, resonant: bool) -> Result<([f64; 2], [f64; 2])> {
    let c1 = random_point(rng, r0, r1);
    if !resonant {
        return Ok((c1, random_point(rng, r0, r1)));
    }
    let t: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
    let e = [t.cos(), t.sin()];
    match resonant_partner(c1, e, symbol) {
        Some(r) if (r0..=r1).contains(&r) => Ok((c1, [r * e[0], r * e[1]])),
        _ => Err(ZkError::HypothesisViolated("no resonant partner in the shell".into())),
    }
}

fn periodic_instance(rng: &mut ChaCha8Rng, n: u32, cfg: &SweepConfig) -> Result<TrilinearReport> {
    let (c1, c2) = centers(rng, 0.5, 1.0, Symbol::PsiSym, cfg.resonant)?;
    let c3 = [c1[0] + c2[0], c1[1] + c2[1]];
    if c3[0].hypot(c3[1]) < 0.25 {
        return Err(ZkError::HypothesisViolated("|k3| too small".into()));
    }
    let lat = DualLattice::new(n, 3)?;
    let rho = cfg.patch;
    let (p1, p2, p3) = (
        patch_points(c1, rho, n),
        patch_points(c2, rho, n),
        patch_points(c3, 2.0 * rho, n),
    );
    let normal = |k: FreqIndex| surface_normal(&SurfacePoint::new(k.coords(), Symbol::PsiSym));
    let mut dmin = f64::INFINITY;
    for _ in 0..64 {
        let k1 = p1[rng.gen_range(0..p1.len())];
        let k2 = p2[rng.gen_range(0..p2.len())];
        let k3 = p3[rng.gen_range(0..p3.len())];
        dmin = dmin.min(det3(normal(k1), normal(k2), normal(k3)).abs());
    }
    let a = dyadic_ceil(1.0 / dmin);
    if a > cfg.a_max {
        return Err(ZkError::HypothesisViolated(format!("|det| = {dmin:.3e}")));
    }
    let jmax = (n as f64).log2() as i32 + 2;
    let mut ls = [0.0; 3];
    for l in ls.iter_mut() {
        *l = 2f64.powi(-rng.gen_range(0..=jmax));
    }
    let f1 = random_mod(rng, &p1, lat, ls[0], Symbol::PsiSym)?;
    let f2 = random_mod(rng, &p2, lat, ls[1], Symbol::PsiSym)?;
    let f3 = random_mod(rng, &p3, lat, ls[2], Symbol::PsiSym)?;
    let value = trilinear_form(&f1, &f2, &f3)?;
    let norms = [mod_norm(&f1), mod_norm(&f2), mod_norm(&f3)];
    let nf = n as f64;
    let bound = constant_c(a, nf, ls[0], ls[1], ls[2]);
    let ratio = nf.powi(4) * value / (bound * norms.iter().map(|x| nf * x).product::<f64>());
    Ok(TrilinearReport {
        value,
        norms,
        bound,
        ratio,
        n: [nf, nf, nf],
        l: ls,
        a,
        lambda: n,
        tag: "periodic-nlw".into(),
    })
}

fn nlw_zk_instance(rng: &mut ChaCha8Rng, n: u32, cfg: &SweepConfig) -> Result<TrilinearReport> {
    let nf = n as f64;
    let (c1, c2) = centers(rng, nf / 2.0, nf, Symbol::Phi, cfg.resonant)?;
    let c3 = [c1[0] + c2[0], c1[1] + c2[1]];
    let n3 = c3[0].hypot(c3[1]);
    if n3 < 1.0 {
        return Err(ZkError::HypothesisViolated("|k3| < 1".into()));
    }
    let lat = DualLattice::new(1, 2 * n + 2)?;
    let rho = cfg.patch * nf / 4.0;
    let (p1, p2, p3) = (
        patch_points(c1, rho, 1),
        patch_points(c2, rho, 1),
        patch_points(c3, 2.0 * rho, 1),
    );
    let mut tmin = f64::INFINITY;
    for k1 in &p1 {
        for k2 in &p2 {
            tmin = tmin.min(zk_transversality(k1.coords(), k2.coords()).abs());
        }
    }
    let n4 = nf.powi(4);
    let a = dyadic_ceil(n4 / tmin);
    if a > cfg.a_max.min(nf) {
        return Err(ZkError::HypothesisViolated(format!("transversality {tmin:.3e}")));
    }
    // ∇φ varies by less than A⁻¹N₁² across each patch
    let spread = |p: &[FreqIndex]| {
        let g: Vec<[f64; 2]> = p.iter().map(|k| Symbol::Phi.gradient(k.xi(), k.eta())).collect();
        let mut m: f64 = 0.0;
        for x in &g {
            for y in &g {
                m = m.max((x[0] - y[0]).hypot(x[1] - y[1]));
            }
        }
        m
    };
    let reg = spread(&p1).max(spread(&p2)).max(spread(&p3));
    if reg > nf * nf / a {
        return Err(ZkError::HypothesisViolated(format!("gradient spread {reg:.3e}")));
    }
    let jmax = 2 * (nf.log2() as i32) + 2;
    let mut ls = [0.0; 3];
    for l in ls.iter_mut() {
        *l = 2f64.powi(rng.gen_range(0..=jmax));
    }
    let f1 = random_mod(rng, &p1, lat, ls[0], Symbol::Phi)?;
    let f2 = random_mod(rng, &p2, lat, ls[1], Symbol::Phi)?;
    let f3 = random_mod(rng, &p3, lat, ls[2], Symbol::Phi)?;
    let value = trilinear_form(&f1, &f2, &f3)?;
    let norms = [mod_norm(&f1), mod_norm(&f2), mod_norm(&f3)];
    let bound = constant_c_tilde(a, nf, ls[0], ls[1], ls[2]);
    let ratio = value / (bound * norms.iter().product::<f64>());
    Ok(TrilinearReport {
        value,
        norms,
        bound,
        ratio,
        n: [nf, nf, n3.max(1.0)],
        l: ls,
        a,
        lambda: 1,
        tag: "nlw-zk".into(),
    })
}

/// Randomized hypothesis-satisfying instances. Instance i of shell n draws
/// from stream (n_index·instances + i) of the master seed; each instance
/// retries up to `max_attempts` times and counts as skipped otherwise.
pub fn bound_ratio_sweep(cfg: &SweepConfig, seed: u64) -> Result<SweepOutcome> {
    let jobs: Vec<(usize, u32, usize)> = cfg
        .n_values
        .iter()
        .enumerate()
        .flat_map(|(j, &n)| (0..cfg.instances_per_n).map(move |i| (j, n, i)))
        .collect();
    let results: Vec<Result<Option<TrilinearReport>>> = jobs
        .par_iter()
        .map(|&(j, n, i)| {
            let mut rng = instance_rng(seed, (j * cfg.instances_per_n + i) as u64);
            for _ in 0..cfg.max_attempts {
                let r = match cfg.kind {
                    SweepKind::PeriodicNlw => periodic_instance(&mut rng, n, cfg),
                    SweepKind::NlwZk => nlw_zk_instance(&mut rng, n, cfg),
                };
                match r {
                    Ok(rep) => return Ok(Some(rep)),
                    Err(ZkError::HypothesisViolated(_)) => continue,
                    Err(e) => return Err(e),
                }
            }
            Ok(None)
        })
        .collect();
    let mut reports = Vec::new();
    let mut skipped = 0;
    for r in results {
        match r? {
            Some(rep) => reports.push(rep),
            None => skipped += 1,
        }
    }
    Ok(SweepOutcome {
        reports,
        skipped,
        attempted: jobs.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn mc_kernel(phi: f64, l: [f64; 3], n: usize, seed: u64) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut hit = 0usize;
        for _ in 0..n {
            let s1 = rng.gen_range(-l[0]..l[0]);
            let s2 = rng.gen_range(-l[1]..l[1]);
            if (s1 + s2 + phi).abs() <= l[2] {
                hit += 1;
            }
        }
        4.0 * l[0] * l[1] * hit as f64 / n as f64
    }

    #[test]
    fn kernel_examples() {
        assert_eq!(overlap_kernel(3.5, 1.0, 1.0, 1.0), 0.0);
        assert_eq!(overlap_kernel(0.0, 0.5, 1.5, 2.0), 4.0 * 0.5 * 1.5);
        assert!((overlap_kernel(1.0, 1.0, 1.0, 1.0) - 2.0).abs() < 1e-15);
        let mc = mc_kernel(1.0, [1.0, 1.0, 1.0], 10_000_000, 1);
        assert!((mc - 2.0).abs() < 1e-2, "{mc}");
        // L₁ ≤ L₂ = L₃: 4L₁L₂ − L₁²
        assert!((overlap_kernel(0.0, 0.3, 1.0, 1.0) - (1.2 - 0.09)).abs() < 1e-15);
    }

    #[test]
    fn kernel_matches_monte_carlo() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for i in 0..20 {
            let l = [rng.gen_range(0.1..2.0), rng.gen_range(0.1..2.0), rng.gen_range(0.1..2.0)];
            let phi = rng.gen_range(-5.0..5.0);
            let mc = mc_kernel(phi, l, 400_000, i);
            let k = overlap_kernel(phi, l[0], l[1], l[2]);
            let se = 4.0 * l[0] * l[1] / (400_000f64).sqrt();
            assert!((mc - k).abs() < 5.0 * se, "{phi} {l:?} {mc} {k}");
        }
    }

    fn tau_quadrature(f1: &ModFunction, f2: &ModFunction, f3: &ModFunction) -> f64 {
        // midpoint rule in s₁ = τ₁ − symbol(k₁), exact length in s₂
        let lmin = f1.l.min(f2.l).min(f3.l);
        let lam = f1.lattice().lambda as f64;
        let mut total = 0.0;
        for (k1, g1) in f1.g.entries() {
            for (k2, g2) in f2.g.entries() {
                let k3 = k1 + k2;
                let g3 = f3.g.get(k3);
                if g3.re == 0.0 {
                    continue;
                }
                let phi = f1.symbol_at(k1) + f2.symbol_at(k2) - f3.symbol_at(k3);
                // the s₂-length is linear between these breakpoints
                let mut cuts = vec![-f1.l, f1.l];
                for c in [-f3.l - phi + f2.l, -f3.l - phi - f2.l, f3.l - phi + f2.l, f3.l - phi - f2.l] {
                    if c > -f1.l && c < f1.l {
                        cuts.push(c);
                    }
                }
                cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
                let mut area = 0.0;
                for w in cuts.windows(2) {
                    let n = ((w[1] - w[0]) / (lmin / 16.0)).ceil().max(1.0) as usize;
                    let h = (w[1] - w[0]) / n as f64;
                    for i in 0..n {
                        let s1 = w[0] + (i as f64 + 0.5) * h;
                        let lo = (-f2.l).max(-f3.l - phi - s1);
                        let hi = f2.l.min(f3.l - phi - s1);
                        area += (hi - lo).max(0.0) * h;
                    }
                }
                total += (g1 * g2 * g3).re * area;
            }
        }
        total / lam.powi(4)
    }

    fn random_small(rng: &mut ChaCha8Rng, lam: u32, symbol: Symbol) -> [ModFunction; 3] {
        let lat = DualLattice::new(lam, 8 / lam.min(8)).unwrap();
        let m = lat.max_index() / 2;
        let mut fs = Vec::new();
        for _ in 0..3 {
            let mut g = GridFunction::zeros(lat);
            for _ in 0..rng.gen_range(1..6) {
                let k = lat.point(rng.gen_range(-m..=m), rng.gen_range(-m..=m));
                g.set(k, Complex64::new(rng.gen_range(0.1..1.0), 0.0)).unwrap();
            }
            fs.push(ModFunction::new(g, rng.gen_range(0.2..3.0), symbol).unwrap());
        }
        [fs[0].clone(), fs[1].clone(), fs[2].clone()]
    }

    #[test]
    fn form_matches_tau_quadrature() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut nonzero = 0;
        for i in 0..100 {
            let lam = [1, 2][i % 2];
            let [f1, f2, mut f3] = random_small(&mut rng, lam, Symbol::Phi);
            // force some interactions
            let (k1, _) = f1.g.entries()[0];
            let (k2, _) = f2.g.entries()[0];
            f3.g.set(k1 + k2, Complex64::new(0.5, 0.0)).unwrap();
            let exact = trilinear_form(&f1, &f2, &f3).unwrap();
            let quad = tau_quadrature(&f1, &f2, &f3);
            if exact > 0.0 {
                nonzero += 1;
            }
            assert!((exact - quad).abs() <= 1e-3 * exact.abs() + 1e-12, "{exact} {quad}");
        }
        assert!(nonzero > 10);
    }

    #[test]
    fn zero_g3_gives_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let [f1, f2, mut f3] = random_small(&mut rng, 1, Symbol::Phi);
        f3.g = GridFunction::zeros(f3.lattice());
        assert_eq!(trilinear_form(&f1, &f2, &f3).unwrap(), 0.0);
        let w = Weight::ShortTime { n1: 8.0, n3: 2.0 };
        assert_eq!(weighted_trilinear_form(&f1, &f2, &f3, w).unwrap(), 0.0);
    }

    #[test]
    fn lattice_mismatch() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let [f1, f2, _] = random_small(&mut rng, 1, Symbol::Phi);
        let [g1, _, _] = random_small(&mut rng, 2, Symbol::Phi);
        assert_eq!(trilinear_form(&f1, &f2, &g1), Err(ZkError::LatticeMismatch));
        let [h1, _, _] = random_small(&mut rng, 1, Symbol::PsiSym);
        assert_eq!(trilinear_form(&f1, &f2, &h1), Err(ZkError::LatticeMismatch));
    }

    #[test]
    fn norm_examples() {
        let lat = DualLattice::new(1, 4).unwrap();
        let f = ModFunction::new(GridFunction::zeros(lat), 1.0, Symbol::Phi).unwrap();
        assert_eq!(mod_norm(&f), 0.0);
        let mut g = GridFunction::zeros(lat);
        g.set(lat.point(1, 2), Complex64::new(1.0, 0.0)).unwrap();
        let f = ModFunction::new(g, 0.5, Symbol::Phi).unwrap();
        assert!((mod_norm(&f) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn norm_matches_tau_quadrature() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for lam in [1, 2, 3] {
            let [f, _, _] = random_small(&mut rng, lam, Symbol::Phi);
            // ∫|f|² dτ over a grid covering every window
            let h = f.l / 1000.0;
            let mut s = 0.0;
            for (k, g) in f.g.entries() {
                let c = f.symbol_at(k);
                let n = (4.0 * f.l / h) as i64;
                for i in 0..n {
                    let tau = c - 2.0 * f.l + (i as f64 + 0.5) * h;
                    if (tau - c).abs() <= f.l {
                        s += g.norm_sqr() * h;
                    }
                }
            }
            let q = (s / (lam as f64).powi(2)).sqrt();
            assert!((q - mod_norm(&f)).abs() < 1e-6 * q, "{q} {}", mod_norm(&f));
        }
    }

    #[test]
    fn sharpness_triple_closed_form() {
        for n in [8, 16, 32, 64] {
            for (l1, l2) in [(0.25, 0.25), (0.1, 0.7), (1.0, 3.0)] {
                let l3 = l1 + l2;
                let [f1, f2, f3] = sharpness_triple(n, [l1, l2, l3]).unwrap();
                let v = trilinear_form(&f1, &f2, &f3).unwrap();
                assert!((v - 4.0 * l1 * l2).abs() <= 4.0 * f64::EPSILON * v);
                let ratio = v / (mod_norm(&f1) * mod_norm(&f2) * mod_norm(&f3));
                let want = (2.0 * l1 * l2 / l3).sqrt();
                assert!((ratio - want).abs() < 1e-12 * want);
            }
            // L₁ ≤ L₂ = L₃
            let [f1, f2, f3] = sharpness_triple(n, [0.25, 1.0, 1.0]).unwrap();
            let v = trilinear_form(&f1, &f2, &f3).unwrap();
            assert!((v - (1.0 - 0.0625)).abs() < 1e-15);
        }
    }

    #[test]
    fn sharpness_saturates_c() {
        // L_med ≤ 1/N, A = 1: ratio/C ≥ 1/4
        for n in [8i64, 16, 32] {
            let nf = n as f64;
            let l = 1.0 / (4.0 * nf);
            let ls = [l, l, 2.0 * l];
            let [f1, f2, f3] = sharpness_triple(n, ls).unwrap();
            let v = trilinear_form(&f1, &f2, &f3).unwrap();
            let norms = mod_norm(&f1) * mod_norm(&f2) * mod_norm(&f3);
            let r = v / (constant_c(1.0, 1.0, ls[0], ls[1], ls[2]) * norms);
            assert!(r >= 0.25, "{r}");
        }
    }

    #[test]
    fn weighted_sharpness() {
        for n in [8i64, 16, 32] {
            let ls = [0.5, 0.5, 1.0];
            let [f1, f2, f3] = sharpness_triple(n, ls).unwrap();
            let v = weighted_trilinear_form(&f1, &f2, &f3, Weight::Symmetrized).unwrap();
            let norms = mod_norm(&f1) * mod_norm(&f2) * mod_norm(&f3);
            let r = v / (3.0 * n as f64 * 0.5f64.sqrt() * norms);
            assert!((0.5..=2.0).contains(&r), "{r}");
        }
    }

    #[test]
    fn weighted_short_time_localization() {
        // L_med = L_max = N: value ≲ w (L₁L₂L₃)^{1/2} N⁻¹ Π‖f‖, weight w = 3N
        for n in [8i64, 16] {
            let nf = n as f64;
            let ls = [0.5, nf, nf];
            let [f1, f2, f3] = sharpness_triple(n, ls).unwrap();
            let v = weighted_trilinear_form(&f1, &f2, &f3, Weight::Symmetrized).unwrap();
            let norms = mod_norm(&f1) * mod_norm(&f2) * mod_norm(&f3);
            let b = 3.0 * nf * (ls[0] * ls[1] * ls[2]).sqrt() / nf * norms;
            assert!(v <= 4.0 * b, "{v} {b}");
        }
    }

    #[test]
    fn constant_examples() {
        let c = constant_c(1.0, 16.0, 1e-4, 1e-4, 1e-4);
        assert!((c / 1e-2 - 1.0).abs() < 1e-2);
        for (a, n, ls) in [(2.0, 64.0, [1e-3, 5e-3, 0.5]), (1.0, 16.0, [1e-3, 1e-2, 0.03])] {
            let r = constant_c(a, n, ls[0], ls[1], ls[2]) / constant_c_piecewise(a, n, ls[0], ls[1], ls[2]);
            assert!((0.5..=2.0).contains(&r), "{r}");
        }
        for (a, n, ls) in [(2.0, 16.0, [0.1, 0.5, 2.0]), (4.0, 32.0, [0.2, 1.0, 1.0])] {
            let r = constant_c(a, n, ls[0], ls[1], ls[2]) / constant_c_piecewise(a, n, ls[0], ls[1], ls[2]);
            assert!((0.5..=2.0).contains(&r), "{r}");
        }
        let ct = constant_c_tilde(1.0, 64.0, 1.0, 1.0, 1.0);
        assert!((ct - 1.0).abs() < 1e-3);
    }

    #[test]
    fn cauchy_schwarz_examples() {
        let ls = [0.3, 0.6, 0.9];
        let [f1, f2, f3] = sharpness_triple(8, ls).unwrap();
        let b = cauchy_schwarz_bound(&f1, &f2, &f3);
        let norms = mod_norm(&f1) * mod_norm(&f2) * mod_norm(&f3);
        assert!((b - 0.3f64.sqrt() * norms).abs() < 1e-14);
        let v = trilinear_form(&f1, &f2, &f3).unwrap();
        assert!(v <= 4.0 * b && 4.0 * v >= b, "{v} {b}");
    }

    #[test]
    fn sweep_is_deterministic_and_bounded() {
        for kind in [SweepKind::PeriodicNlw, SweepKind::NlwZk] {
            let cfg = SweepConfig {
                kind,
                n_values: vec![16],
                instances_per_n: 6,
                patch: default_patch(),
                a_max: default_a_max(),
                max_attempts: default_attempts(),
                resonant: true,
            };
            let a = bound_ratio_sweep(&cfg, 7).unwrap();
            let b = bound_ratio_sweep(&cfg, 7).unwrap();
            assert_eq!(a, b);
            assert!(a.reports.len() >= 4, "{kind:?} {}", a.reports.len());
            for r in &a.reports {
                assert!(r.ratio.is_finite() && r.ratio >= 0.0);
            }
        }
    }

    proptest! {
        #[test]
        fn kernel_even_bounded(phi in -10.0f64..10.0, a in 0.01f64..3.0, b in 0.01f64..3.0, c in 0.01f64..3.0) {
            let k = overlap_kernel(phi, a, b, c);
            prop_assert_eq!(k, overlap_kernel(-phi, a, b, c));
            let s = sorted3(a, b, c);
            prop_assert!(k <= 4.0 * s[0] * s[1] + 1e-12);
            prop_assert!(k >= 0.0);
            if phi.abs() > a + b + c { prop_assert_eq!(k, 0.0); }
            // continuity
            let d = (overlap_kernel(phi + 1e-7, a, b, c) - k).abs();
            prop_assert!(d <= 1e-6 * (a + b + c));
        }

        #[test]
        fn form_symmetry_and_scaling(seed in 0u64..500, c in 0.1f64..10.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let [f1, f2, mut f3] = random_small(&mut rng, 1, Symbol::Phi);
            let (k1, _) = f1.g.entries()[0];
            let (k2, _) = f2.g.entries()[0];
            f3.g.set(k1 + k2, Complex64::new(0.5, 0.0)).unwrap();
            let v = trilinear_form(&f1, &f2, &f3).unwrap();
            prop_assert_eq!(v, trilinear_form(&f2, &f1, &f3).unwrap());
            let mut g = f1.clone();
            g.g = f1.g.map_indexed(|_, x| x * c);
            let w = trilinear_form(&g, &f2, &f3).unwrap();
            prop_assert!((w - c * v).abs() <= 1e-12 * (c * v).abs().max(1e-300));
            prop_assert!(v <= 4.0 * cauchy_schwarz_bound(&f1, &f2, &f3) + 1e-15);
        }
    }
}
