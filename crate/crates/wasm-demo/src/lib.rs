//! Browser bindings for a few closed-form pieces of `zkw-core`.

use wasm_bindgen::prelude::*;
use zkw_core::lattice_counting::{count_strip, Strip};
use zkw_core::resonance::{resonance_phi, resonance_phi_hat, transversality_f, zk_transversality, FreqPair};
use zkw_core::spectral_lattice::DualLattice;
use zkw_core::trilinear_forms::overlap_kernel;

/// Area of {|s₁| ≤ L₁, |s₂| ≤ L₂, |s₁ + s₂ + Φ| ≤ L₃}.
#[wasm_bindgen(js_name = overlapKernel)]
pub fn overlap(phi: f64, l1: f64, l2: f64, l3: f64) -> f64 {
    overlap_kernel(phi, l1, l2, l3)
}

/// [Φ, F, Φ̂, zk transversality] for the pair k₁ = (x1, y1), k₂ = (x2, y2).
#[wasm_bindgen(js_name = resonance)]
pub fn resonance(x1: f64, y1: f64, x2: f64, y2: f64) -> Vec<f64> {
    let p = FreqPair::new([x1, y1], [x2, y2]);
    vec![
        resonance_phi(&p),
        transversality_f(&p),
        resonance_phi_hat(&p),
        zk_transversality([x1, y1], [x2, y2]),
    ]
}

/// Points of ℤ²/λ in the slanted strip S^α_{ℓ,w}.
#[wasm_bindgen(js_name = stripCount)]
pub fn strip_count(ell: f64, w: f64, a1: f64, a2: f64, lambda: u32) -> Result<f64, String> {
    let strip = Strip::new(ell, w, [a1, a2]).map_err(|e| e.to_string())?;
    let reach = strip.bbox().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let lattice = DualLattice::new(lambda, reach.ceil() as u32 + 1).map_err(|e| e.to_string())?;
    count_strip(&strip, &lattice).map(|n| n as f64).map_err(|e| e.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_corners() {
        assert_eq!(overlap(0.0, 1.0, 2.0, 3.0), 8.0);
        assert_eq!(overlap(10.0, 1.0, 1.0, 1.0), 0.0);
    }

    #[test]
    fn resonance_vanishes_on_axis_pairs() {
        let r = resonance(1.0, 0.0, 0.0, 1.0);
        assert_eq!(r[0], 0.0);
        assert_eq!(r[2], 1.0);
    }

    #[test]
    fn strip_counts() {
        // c₁ = c₂ = 0 only: the origin
        assert_eq!(strip_count(0.1, 0.1, 0.0, 0.0, 1).unwrap(), 1.0);
        assert!(strip_count(4.0, 1.0, 0.3, 0.2, 2).unwrap() > 0.0);
        assert!(strip_count(-1.0, 1.0, 0.0, 0.0, 1).is_err());
    }
}
