//! Resonance and transversality polynomials, surface normals and the
//! transversality determinant.

use crate::spectral_lattice::{phi, Symbol};

/// A pair (k1, k2); k3 = k1 + k2 is always derived.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FreqPair {
    pub k1: [f64; 2],
    pub k2: [f64; 2],
}

impl FreqPair {
    pub fn new(k1: [f64; 2], k2: [f64; 2]) -> Self {
        Self { k1, k2 }
    }

    pub fn k3(&self) -> [f64; 2] {
        [self.k1[0] + self.k2[0], self.k1[1] + self.k2[1]]
    }

    pub fn swapped(&self) -> Self {
        Self::new(self.k2, self.k1)
    }
}

/// Φ = ξ₁ξ₂(ξ₁+ξ₂) + η₁η₂(η₁+η₂)
pub fn resonance_phi(p: &FreqPair) -> f64 {
    let [x1, y1] = p.k1;
    let [x2, y2] = p.k2;
    x1 * x2 * (x1 + x2) + y1 * y2 * (y1 + y2)
}

/// F = ξ₁η₂ + ξ₂η₁ + 2(ξ₁η₁ + ξ₂η₂)
pub fn transversality_f(p: &FreqPair) -> f64 {
    let [x1, y1] = p.k1;
    let [x2, y2] = p.k2;
    x1 * y2 + x2 * y1 + 2.0 * (x1 * y1 + x2 * y2)
}

/// Φ̂ = 3ξ₁ξ₂(ξ₁+ξ₂) + ξ₁η₂(2η₁+η₂) + ξ₂η₁(η₁+2η₂) = φ(k1+k2) − φ(k1) − φ(k2)
pub fn resonance_phi_hat(p: &FreqPair) -> f64 {
    let [x1, y1] = p.k1;
    let [x2, y2] = p.k2;
    3.0 * x1 * x2 * (x1 + x2) + x1 * y2 * (2.0 * y1 + y2) + x2 * y1 * (y1 + 2.0 * y2)
}

/// Φ̂ in exact integer arithmetic on lattice numerators (scaled by λ³).
pub fn resonance_phi_hat_int(k1: (i64, i64), k2: (i64, i64)) -> i128 {
    let (x1, y1) = (k1.0 as i128, k1.1 as i128);
    let (x2, y2) = (k2.0 as i128, k2.1 as i128);
    3 * x1 * x2 * (x1 + x2) + x1 * y2 * (2 * y1 + y2) + x2 * y1 * (y1 + 2 * y2)
}

pub fn phi_int(k: (i64, i64)) -> i128 {
    let (a, b) = (k.0 as i128, k.1 as i128);
    a * a * a + a * b * b
}

/// (ξ₁η₂ − ξ₂η₁)(3(ξ₁²+ξ₁ξ₂+ξ₂²) − (η₁²+η₁η₂+η₂²)), the quantity bounded
/// below by A⁻¹N₁⁴ in the transversality hypothesis for φ.
pub fn zk_transversality(k1: [f64; 2], k2: [f64; 2]) -> f64 {
    let [x1, y1] = k1;
    let [x2, y2] = k2;
    (x1 * y2 - x2 * y1)
        * (3.0 * (x1 * x1 + x1 * x2 + x2 * x2) - (y1 * y1 + y1 * y2 + y2 * y2))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfacePoint {
    pub base: [f64; 2],
    pub lift: f64,
    pub symbol: Symbol,
}

impl SurfacePoint {
    pub fn new(base: [f64; 2], symbol: Symbol) -> Self {
        Self {
            base,
            lift: symbol.eval(base[0], base[1]),
            symbol,
        }
    }
}

/// Unit normal (−1, ∇symbol)/|·| to the graph τ = symbol(ξ,η), written in
/// (τ, ξ, η) coordinates.
pub fn surface_normal(pt: &SurfacePoint) -> [f64; 3] {
    let [gx, gy] = pt.symbol.gradient(pt.base[0], pt.base[1]);
    let n = (1.0 + gx * gx + gy * gy).sqrt();
    [-1.0 / n, gx / n, gy / n]
}

pub fn det3(c1: [f64; 3], c2: [f64; 3], c3: [f64; 3]) -> f64 {
    c1[0] * (c2[1] * c3[2] - c2[2] * c3[1]) - c2[0] * (c1[1] * c3[2] - c1[2] * c3[1])
        + c3[0] * (c1[1] * c2[2] - c1[2] * c2[1])
}

pub fn transversality_det(p1: &SurfacePoint, p2: &SurfacePoint, p3: &SurfacePoint) -> f64 {
    det3(surface_normal(p1), surface_normal(p2), surface_normal(p3))
}

/// ξ-gradient of φ, used by the regularity hypothesis.
pub fn grad_phi(k: [f64; 2]) -> [f64; 2] {
    Symbol::Phi.gradient(k[0], k[1])
}

pub fn phi_at(k: [f64; 2]) -> f64 {
    phi(k[0], k[1])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral_lattice::psi_sym;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn phi_examples() {
        for n in [1.0, 3.0, 64.0] {
            assert_eq!(resonance_phi(&FreqPair::new([n, -n], [n, 2.0 * n])), 0.0);
        }
        assert_eq!(resonance_phi(&FreqPair::new([0.0, 0.0], [3.5, -1.0])), 0.0);
        assert_eq!(resonance_phi(&FreqPair::new([1.0, 2.0], [3.0, 4.0])), 60.0);
    }

    #[test]
    fn f_examples() {
        for n in [1.0, 5.0, 32.0] {
            let v = transversality_f(&FreqPair::new([n, -n], [n, 2.0 * n]));
            assert_eq!(v, 3.0 * n * n);
        }
        assert_eq!(transversality_f(&FreqPair::new([0.0, 0.0], [0.0, 0.0])), 0.0);
        assert_eq!(transversality_f(&FreqPair::new([1.0, 0.0], [0.0, 1.0])), 1.0);
    }

    #[test]
    fn phi_hat_examples() {
        for n in [1.0, 16.0] {
            assert_eq!(resonance_phi_hat(&FreqPair::new([0.0, 2.0], [n, -1.0])), 0.0);
        }
        assert_eq!(resonance_phi_hat(&FreqPair::new([0.0, 0.0], [2.0, 7.0])), 0.0);
        let v = resonance_phi_hat(&FreqPair::new([1.0, 1.0], [1.0, 1.0]));
        assert_eq!(v, 12.0);
        assert_eq!(phi(2.0, 2.0) - 2.0 * phi(1.0, 1.0), 12.0);
    }

    #[test]
    fn phi_hat_identity_integer() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10_000 {
            let k1 = (rng.gen_range(-2000..=2000), rng.gen_range(-2000..=2000));
            let k2 = (rng.gen_range(-2000..=2000), rng.gen_range(-2000..=2000));
            let k3 = (k1.0 + k2.0, k1.1 + k2.1);
            assert_eq!(resonance_phi_hat_int(k1, k2), phi_int(k3) - phi_int(k1) - phi_int(k2));
        }
    }

    #[test]
    fn psi_resonance_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..10_000 {
            let l1 = [rng.gen_range(-50.0..50.0), rng.gen_range(-50.0..50.0)];
            let l2 = [rng.gen_range(-50.0..50.0), rng.gen_range(-50.0..50.0)];
            let l3 = [l1[0] + l2[0], l1[1] + l2[1]];
            let lhs = psi_sym(l1[0], l1[1]) + psi_sym(l2[0], l2[1]) - psi_sym(l3[0], l3[1]);
            let rhs = -3.0 * resonance_phi(&FreqPair::new(l1, l2));
            let scale = [l1, l2, l3]
                .iter()
                .map(|l| l[0].abs().powi(3) + l[1].abs().powi(3))
                .sum::<f64>();
            assert!((lhs - rhs).abs() <= 1e-10 * scale.max(1.0));
        }
    }

    #[test]
    fn normal_examples() {
        let n0 = surface_normal(&SurfacePoint::new([0.0, 0.0], Symbol::Phi));
        assert_eq!(n0, [-1.0, 0.0, 0.0]);
        let n1 = surface_normal(&SurfacePoint::new([1.0, 0.0], Symbol::Phi));
        let s = 10f64.sqrt();
        for (a, b) in n1.iter().zip([-1.0 / s, 3.0 / s, 0.0]) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn det_examples() {
        let p = SurfacePoint::new([1.0, 2.0], Symbol::PsiSym);
        assert_eq!(transversality_det(&p, &p, &p), 0.0);
        assert_eq!(det3([1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]), 1.0);
        // (N,−N),(N,2N),(2N,N) read on ℤ²/N, N = 8
        let n = 8.0;
        let s = |a: f64, b: f64| SurfacePoint::new([a, b], Symbol::PsiSym);
        let d = transversality_det(&s(1.0, -1.0), &s(1.0, 2.0), &s(2.0, 1.0));
        assert!(d.abs() >= 0.1, "det = {d}");
        // unscaled frequencies are nearly tangent
        let raw = |a: f64, b: f64| SurfacePoint::new([a * n, b * n], Symbol::PsiSym);
        assert!(transversality_det(&raw(1.0, -1.0), &raw(1.0, 2.0), &raw(2.0, 1.0)).abs() < 0.01);
    }

    fn tangent_check(symbol: Symbol, x: f64, y: f64) {
        let pt = SurfacePoint::new([x, y], symbol);
        let n = surface_normal(&pt);
        let h = 1e-4;
        let tx = [
            (symbol.eval(x + h, y) - symbol.eval(x - h, y)) / (2.0 * h),
            1.0,
            0.0,
        ];
        let ty = [
            (symbol.eval(x, y + h) - symbol.eval(x, y - h)) / (2.0 * h),
            0.0,
            1.0,
        ];
        let dot = |a: [f64; 3], b: [f64; 3]| a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
        let norm = |a: [f64; 3]| dot(a, a).sqrt();
        assert!((norm(n) - 1.0).abs() < 1e-12);
        assert!(dot(n, tx).abs() / norm(tx) < 1e-6);
        assert!(dot(n, ty).abs() / norm(ty) < 1e-6);
    }

    proptest! {
        #[test]
        fn normals_are_unit_and_tangent(x in -3.0f64..3.0, y in -3.0f64..3.0) {
            tangent_check(Symbol::Phi, x, y);
            tangent_check(Symbol::PsiSym, x, y);
        }

        #[test]
        fn swap_symmetry(a in prop::array::uniform4(-100.0f64..100.0)) {
            let p = FreqPair::new([a[0], a[1]], [a[2], a[3]]);
            prop_assert_eq!(resonance_phi(&p), resonance_phi(&p.swapped()));
            prop_assert_eq!(transversality_f(&p), transversality_f(&p.swapped()));
        }

        #[test]
        fn det_bounded(a in prop::array::uniform6(-4.0f64..4.0)) {
            let d = transversality_det(
                &SurfacePoint::new([a[0], a[1]], Symbol::Phi),
                &SurfacePoint::new([a[2], a[3]], Symbol::Phi),
                &SurfacePoint::new([a[4], a[5]], Symbol::Phi),
            );
            prop_assert!(d.abs() <= 1.0 + 1e-12);
        }
    }
}
