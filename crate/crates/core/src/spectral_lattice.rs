//! Dual lattice ℤ²/λ, dispersion symbols, Sobolev norms, sharp
//! Littlewood-Paley shells and the symmetrizing change of variables.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::ops::{Add, Neg, Sub};

use crate::error::{Result, ZkError};

pub const DEFAULT_RADIUS: u32 = 128;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DualLattice {
    pub lambda: u32,
    pub radius: u32,
}

impl DualLattice {
    pub fn new(lambda: u32, radius: u32) -> Result<Self> {
        if lambda == 0 || radius == 0 {
            return Err(ZkError::InvalidArgument(
                "lambda and radius must be positive".into(),
            ));
        }
        Ok(Self { lambda, radius })
    }

    /// Largest admissible integer numerator, K·λ.
    pub fn max_index(&self) -> i64 {
        self.radius as i64 * self.lambda as i64
    }

    pub fn side(&self) -> usize {
        (2 * self.max_index() + 1) as usize
    }

    pub fn contains(&self, k: FreqIndex) -> bool {
        let m = self.max_index();
        k.lambda == self.lambda && k.a.abs() <= m && k.b.abs() <= m
    }

    pub fn point(&self, a: i64, b: i64) -> FreqIndex {
        FreqIndex::new(a, b, self.lambda)
    }

    /// All points of the truncation box in lexicographic (a, b) order.
    pub fn points(&self) -> impl Iterator<Item = FreqIndex> + '_ {
        let m = self.max_index();
        (-m..=m).flat_map(move |a| (-m..=m).map(move |b| FreqIndex::new(a, b, self.lambda)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FreqIndex {
    pub a: i64,
    pub b: i64,
    pub lambda: u32,
}

impl FreqIndex {
    pub fn new(a: i64, b: i64, lambda: u32) -> Self {
        Self { a, b, lambda }
    }

    pub fn zero(lambda: u32) -> Self {
        Self::new(0, 0, lambda)
    }

    pub fn xi(&self) -> f64 {
        self.a as f64 / self.lambda as f64
    }

    pub fn eta(&self) -> f64 {
        self.b as f64 / self.lambda as f64
    }

    pub fn coords(&self) -> [f64; 2] {
        [self.xi(), self.eta()]
    }

    /// λ²|k|², an exact integer.
    pub fn norm_sq_scaled(&self) -> i128 {
        let (a, b) = (self.a as i128, self.b as i128);
        a * a + b * b
    }

    pub fn norm(&self) -> f64 {
        (self.norm_sq_scaled() as f64).sqrt() / self.lambda as f64
    }
}

impl Add for FreqIndex {
    type Output = FreqIndex;
    fn add(self, o: FreqIndex) -> FreqIndex {
        debug_assert_eq!(self.lambda, o.lambda);
        FreqIndex::new(self.a + o.a, self.b + o.b, self.lambda)
    }
}

impl Sub for FreqIndex {
    type Output = FreqIndex;
    fn sub(self, o: FreqIndex) -> FreqIndex {
        debug_assert_eq!(self.lambda, o.lambda);
        FreqIndex::new(self.a - o.a, self.b - o.b, self.lambda)
    }
}

impl Neg for FreqIndex {
    type Output = FreqIndex;
    fn neg(self) -> FreqIndex {
        FreqIndex::new(-self.a, -self.b, self.lambda)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Symbol {
    /// φ(ξ,η) = ξ³ + ξη²
    Phi,
    /// ψ̃(ℓ) = ℓ₁³ + ℓ₂³
    PsiSym,
}

impl Symbol {
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        match self {
            Symbol::Phi => phi(x, y),
            Symbol::PsiSym => psi_sym(x, y),
        }
    }

    pub fn gradient(&self, x: f64, y: f64) -> [f64; 2] {
        match self {
            Symbol::Phi => [3.0 * x * x + y * y, 2.0 * x * y],
            Symbol::PsiSym => [3.0 * x * x, 3.0 * y * y],
        }
    }
}

pub fn phi(x: f64, y: f64) -> f64 {
    x * x * x + x * y * y
}

pub fn psi_sym(x: f64, y: f64) -> f64 {
    x * x * x + y * y * y
}

/// φ(k) from the integer numerators: (a³ + ab²)/λ³.
pub fn dispersion_phi(k: FreqIndex) -> f64 {
    let (a, b) = (k.a as i128, k.b as i128);
    let num = a * a * a + a * b * b;
    let l = k.lambda as f64;
    num as f64 / (l * l * l)
}

pub fn dispersion_psi_sym(l: [f64; 2]) -> f64 {
    psi_sym(l[0], l[1])
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    pub lattice: DualLattice,
    values: Vec<Complex64>,
}

impl GridFunction {
    pub fn zeros(lattice: DualLattice) -> Self {
        let s = lattice.side();
        Self {
            lattice,
            values: vec![Complex64::new(0.0, 0.0); s * s],
        }
    }

    fn offset(&self, a: i64, b: i64) -> Option<usize> {
        let m = self.lattice.max_index();
        if a.abs() > m || b.abs() > m {
            return None;
        }
        let s = self.lattice.side();
        Some((a + m) as usize * s + (b + m) as usize)
    }

    /// Dense storage in lexicographic (a, b) order over the truncation box.
    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn get(&self, k: FreqIndex) -> Complex64 {
        self.offset(k.a, k.b)
            .map(|i| self.values[i])
            .unwrap_or(Complex64::new(0.0, 0.0))
    }

    pub fn set(&mut self, k: FreqIndex, v: Complex64) -> Result<()> {
        match self.offset(k.a, k.b) {
            Some(i) => {
                self.values[i] = v;
                Ok(())
            }
            None => Err(ZkError::TruncationExceeded {
                needed: k.a.abs().max(k.b.abs()),
                have: self.lattice.max_index(),
            }),
        }
    }

    /// Nonzero entries in lexicographic (a, b) order.
    pub fn entries(&self) -> Vec<(FreqIndex, Complex64)> {
        self.lattice
            .points()
            .zip(self.values.iter())
            .filter(|(_, v)| v.re != 0.0 || v.im != 0.0)
            .map(|(k, v)| (k, *v))
            .collect()
    }

    pub fn map_indexed<F: Fn(FreqIndex, Complex64) -> Complex64>(&self, f: F) -> Self {
        let values = self
            .lattice
            .points()
            .zip(self.values.iter())
            .map(|(k, v)| f(k, *v))
            .collect();
        Self {
            lattice: self.lattice,
            values,
        }
    }

    pub fn l2_norm(&self) -> f64 {
        sobolev_norm(self, 0.0)
    }

    /// max |f(-k) - conj f(k)|.
    pub fn hermitian_defect(&self) -> f64 {
        self.lattice
            .points()
            .map(|k| (self.get(-k) - self.get(k).conj()).norm())
            .fold(0.0, f64::max)
    }

    pub fn to_json(&self) -> serde_json::Value {
        let entries: Vec<_> = self
            .entries()
            .into_iter()
            .map(|(k, v)| serde_json::json!({"a": k.a, "b": k.b, "re": v.re, "im": v.im}))
            .collect();
        serde_json::json!({
            "lambda": self.lattice.lambda,
            "radius": self.lattice.radius,
            "entries": entries,
        })
    }

    pub fn from_json(v: &serde_json::Value) -> Result<Self> {
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct Entry {
            a: i64,
            b: i64,
            re: f64,
            im: f64,
        }
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct Raw {
            lambda: u32,
            radius: u32,
            entries: Vec<Entry>,
        }
        let raw: Raw = serde_json::from_value(v.clone())
            .map_err(|e| ZkError::InvalidArgument(e.to_string()))?;
        let mut f = GridFunction::zeros(DualLattice::new(raw.lambda, raw.radius)?);
        for e in raw.entries {
            f.set(FreqIndex::new(e.a, e.b, raw.lambda), Complex64::new(e.re, e.im))?;
        }
        Ok(f)
    }
}

/// (λ⁻² Σ (1+|k|²)^s |f̂(k)|²)^{1/2}
pub fn sobolev_norm(f: &GridFunction, s: f64) -> f64 {
    let l2 = (f.lattice.lambda as f64).powi(2);
    let sum: f64 = f
        .lattice
        .points()
        .zip(f.values.iter())
        .filter(|(_, v)| v.re != 0.0 || v.im != 0.0)
        .map(|(k, v)| {
            let w = if s == 0.0 {
                1.0
            } else {
                (1.0 + k.norm_sq_scaled() as f64 / l2).powf(s)
            };
            w * v.norm_sqr()
        })
        .sum();
    (sum / l2).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DyadicShell {
    pub n: u32,
}

impl DyadicShell {
    pub fn new(n: u32) -> Self {
        Self { n }
    }

    pub fn size(&self) -> f64 {
        2f64.powi(self.n as i32)
    }

    /// A₀ = {|k| ≤ 1}, Aₙ = {2ⁿ⁻¹ < |k| ≤ 2ⁿ}; exact on ℤ²/λ.
    pub fn contains(&self, k: FreqIndex) -> bool {
        let r2 = k.norm_sq_scaled();
        let l2 = (k.lambda as i128).pow(2);
        let hi = l2 << (2 * self.n);
        if self.n == 0 {
            r2 <= hi
        } else {
            r2 > (l2 << (2 * (self.n - 1))) && r2 <= hi
        }
    }

    pub fn contains_real(&self, r: f64) -> bool {
        let hi = self.size();
        if self.n == 0 {
            r <= 1.0
        } else {
            r > hi / 2.0 && r <= hi
        }
    }

    pub fn of(k: FreqIndex) -> DyadicShell {
        let r2 = k.norm_sq_scaled();
        let l2 = (k.lambda as i128).pow(2);
        let mut n = 0u32;
        while r2 > (l2 << (2 * n)) {
            n += 1;
        }
        DyadicShell::new(n)
    }
}

pub fn littlewood_paley_project(f: &GridFunction, n: u32) -> GridFunction {
    let shell = DyadicShell::new(n);
    f.map_indexed(|k, v| if shell.contains(k) { v } else { Complex64::new(0.0, 0.0) })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModulationRegion {
    pub shell: DyadicShell,
    pub l: f64,
    pub symbol: Symbol,
}

impl ModulationRegion {
    pub fn contains(&self, tau: f64, k: FreqIndex) -> bool {
        let [x, y] = k.coords();
        self.shell.contains(k) && (tau - self.symbol.eval(x, y)).abs() <= self.l
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymmetrizerMap {
    pub forward: [[f64; 2]; 2],
    pub inverse: [[f64; 2]; 2],
}

impl Default for SymmetrizerMap {
    fn default() -> Self {
        let r2 = std::f64::consts::SQRT_2;
        let r3 = 3f64.sqrt();
        let c = 2f64.powf(-1.5);
        Self {
            forward: [[r2, r2 / r3], [r2, -r2 / r3]],
            inverse: [[c, c], [c * r3, -c * r3]],
        }
    }
}

impl SymmetrizerMap {
    pub fn apply(&self, k: [f64; 2]) -> [f64; 2] {
        mat_vec(&self.forward, k)
    }

    pub fn apply_inverse(&self, l: [f64; 2]) -> [f64; 2] {
        mat_vec(&self.inverse, l)
    }

    pub fn det(&self) -> f64 {
        let m = &self.forward;
        m[0][0] * m[1][1] - m[0][1] * m[1][0]
    }
}

fn mat_vec(m: &[[f64; 2]; 2], v: [f64; 2]) -> [f64; 2] {
    [
        m[0][0] * v[0] + m[0][1] * v[1],
        m[1][0] * v[0] + m[1][1] * v[1],
    ]
}

pub fn symmetrize(k: FreqIndex) -> [f64; 2] {
    SymmetrizerMap::default().apply(k.coords())
}

pub fn unsymmetrize(l: [f64; 2]) -> [f64; 2] {
    SymmetrizerMap::default().apply_inverse(l)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn phi_values() {
        assert_eq!(dispersion_phi(FreqIndex::new(0, 0, 1)), 0.0);
        assert_eq!(dispersion_phi(FreqIndex::new(1, 0, 1)), 1.0);
        assert_eq!(dispersion_phi(FreqIndex::new(2, 3, 1)), 26.0);
        assert_eq!(dispersion_phi(FreqIndex::new(4, 6, 2)), 26.0);
    }

    #[test]
    fn psi_values() {
        assert_eq!(dispersion_psi_sym([0.0, 0.0]), 0.0);
        assert_eq!(dispersion_psi_sym([1.0, -1.0]), 0.0);
        assert_eq!(dispersion_psi_sym([1.0, 2.0]), 9.0);
    }

    #[test]
    fn sobolev_examples() {
        let lat = DualLattice::new(1, 8).unwrap();
        let mut f = GridFunction::zeros(lat);
        assert_eq!(sobolev_norm(&f, 3.0), 0.0);
        f.set(lat.point(0, 0), c(1.0)).unwrap();
        assert_eq!(sobolev_norm(&f, 7.0), 1.0);
        let mut g = GridFunction::zeros(lat);
        g.set(lat.point(3, 4), c(1.0)).unwrap();
        assert!((sobolev_norm(&g, 1.0) - 26f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn lp_examples() {
        let lat = DualLattice::new(1, 8).unwrap();
        let mut f = GridFunction::zeros(lat);
        f.set(lat.point(1, 0), c(1.0)).unwrap();
        assert_eq!(littlewood_paley_project(&f, 0), f);
        let mut g = GridFunction::zeros(lat);
        g.set(lat.point(3, 4), c(1.0)).unwrap();
        assert_eq!(littlewood_paley_project(&g, 0).l2_norm(), 0.0);
        let mut h = GridFunction::zeros(lat);
        h.set(lat.point(0, 1), c(1.0)).unwrap();
        h.set(lat.point(3, 0), c(2.0)).unwrap();
        h.set(lat.point(6, 0), c(3.0)).unwrap();
        let p = littlewood_paley_project(&h, 2);
        assert_eq!(p.entries(), vec![(lat.point(3, 0), c(2.0))]);
    }

    #[test]
    fn shell_boundaries_are_sharp() {
        assert!(DyadicShell::new(0).contains(FreqIndex::new(1, 0, 1)));
        assert!(!DyadicShell::new(1).contains(FreqIndex::new(1, 0, 1)));
        assert!(DyadicShell::new(1).contains(FreqIndex::new(2, 0, 1)));
        assert!(DyadicShell::new(2).contains(FreqIndex::new(3, 0, 1)));
        assert_eq!(DyadicShell::of(FreqIndex::new(4, 0, 1)).n, 2);
        assert_eq!(DyadicShell::of(FreqIndex::new(5, 0, 1)).n, 3);
    }

    #[test]
    fn symmetrizer_examples() {
        assert_eq!(symmetrize(FreqIndex::new(0, 0, 1)), [0.0, 0.0]);
        let r = unsymmetrize(symmetrize(FreqIndex::new(5, -7, 1)));
        assert!((r[0] - 5.0).abs() < 1e-12 && (r[1] + 7.0).abs() < 1e-12);
        let s = symmetrize(FreqIndex::new(1, 1, 1));
        let r2 = 2f64.sqrt();
        let r3 = 3f64.sqrt();
        assert!((s[0] - r2 * (1.0 + 1.0 / r3)).abs() < 1e-14);
        assert!((s[1] - r2 * (1.0 - 1.0 / r3)).abs() < 1e-14);
    }

    #[test]
    fn symmetrizer_matrix_facts() {
        let m = SymmetrizerMap::default();
        for i in 0..2 {
            for j in 0..2 {
                let e: f64 = (0..2).map(|k| m.forward[i][k] * m.inverse[k][j]).sum();
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((e - want).abs() < 1e-12);
            }
        }
        // √2·√2·(−2/√3)
        assert!((m.det().abs() - 4.0 / 3f64.sqrt()).abs() < 1e-12);
        let v1 = m.apply([1.0, 3f64.sqrt()]);
        assert!((v1[0] - 2.0 * 2f64.sqrt()).abs() < 1e-12 && v1[1].abs() < 1e-12);
        // φ∘M⁻¹ = 2^{-5/2} ψ̃
        for l in [[0.7, -1.3], [2.1, 0.4], [-3.0, 5.5]] {
            let k = m.apply_inverse(l);
            let want = 2f64.powf(-2.5) * psi_sym(l[0], l[1]);
            assert!((phi(k[0], k[1]) - want).abs() < 1e-12 * (1.0 + want.abs()));
        }
    }

    #[test]
    fn modulation_membership() {
        let g = ModulationRegion {
            shell: DyadicShell::new(1),
            l: 0.5,
            symbol: Symbol::Phi,
        };
        let k = FreqIndex::new(2, 0, 1);
        assert!(g.contains(8.4, k));
        assert!(!g.contains(8.6, k));
        assert!(!g.contains(1.0, FreqIndex::new(1, 0, 1)));
    }

    #[test]
    fn json_round_trip() {
        let lat = DualLattice::new(2, 3).unwrap();
        let mut f = GridFunction::zeros(lat);
        f.set(lat.point(-1, 4), Complex64::new(0.25, -2.0)).unwrap();
        f.set(lat.point(-3, 0), c(1.5)).unwrap();
        let j = f.to_json();
        assert_eq!(j["entries"][0]["a"], -3);
        assert_eq!(GridFunction::from_json(&j).unwrap(), f);
        assert!(f.set(lat.point(7, 0), c(1.0)).is_err());
    }

    proptest! {
        #[test]
        fn parseval(vals in prop::collection::vec(-5.0f64..5.0, 25), lambda in 1u32..4) {
            let lat = DualLattice::new(lambda, 2).unwrap();
            let mut f = GridFunction::zeros(lat);
            let mut sum = 0.0;
            for (i, v) in vals.iter().enumerate() {
                let k = lat.point(i as i64 % 5 - 2, i as i64 / 5 - 2);
                f.set(k, c(*v)).unwrap();
                sum += v * v;
            }
            let n = sobolev_norm(&f, 0.0);
            let want = (sum / (lambda * lambda) as f64).sqrt();
            prop_assert!((n - want).abs() <= 1e-14 * want.max(1.0));
        }

        #[test]
        fn shells_partition(vals in prop::collection::vec(-5.0f64..5.0, 1..40), seed in 0usize..1000) {
            let lat = DualLattice::new(2, 4).unwrap();
            let mut f = GridFunction::zeros(lat);
            for (i, v) in vals.iter().enumerate() {
                let j = (i * 7919 + seed) % 289;
                f.set(lat.point(j as i64 / 17 - 8, j as i64 % 17 - 8), c(*v)).unwrap();
            }
            let mut total = GridFunction::zeros(lat);
            for n in 0..=4 {
                let p = littlewood_paley_project(&f, n);
                total = total.map_indexed(|k, v| v + p.get(k));
            }
            prop_assert_eq!(total, f);
        }

        #[test]
        fn phi_scaled_is_integer(a in -1024i64..=1024, b in -1024i64..=1024, lambda in 1u32..8) {
            let v = dispersion_phi(FreqIndex::new(a, b, lambda)) * (lambda as f64).powi(3);
            prop_assert!((v - v.round()).abs() < 1e-6);
        }

        #[test]
        fn symmetrize_round_trip(a in -500i64..500, b in -500i64..500) {
            let r = unsymmetrize(symmetrize(FreqIndex::new(a, b, 1)));
            prop_assert!((r[0] - a as f64).abs() < 1e-12 * (1.0 + a.abs() as f64));
            prop_assert!((r[1] - b as f64).abs() < 1e-12 * (1.0 + b.abs() as f64));
        }
    }
}
