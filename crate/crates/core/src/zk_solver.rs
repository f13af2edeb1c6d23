//! Pseudo-spectral integration of ∂ₜu + (∂ₓ³+∂ₓ∂ᵧ²)u = σ u∂ₓu on λT²
//! (σ = +1 by default) with a Lawson integrating-factor RK4 step and the
//! 2/3 dealiasing rule.
//!
//! Coefficients follow u(x) = Σ_k û(k) e^{ik·x} with k ∈ ℤ²/λ, so the
//! grid values are an unnormalized inverse FFT of û.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::sync::Mutex;

use crate::error::{Result, ZkError};
use crate::fft::FftN;
use crate::spectral_lattice::{DualLattice, FreqIndex, GridFunction};

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    pub lambda: u32,
    /// truncation radius K; the grid has n = 2Kλ points per side
    pub radius: u32,
    #[serde(default = "plus_one")]
    pub sigma: f64,
    #[serde(default = "yes")]
    pub nonlinear: bool,
}

fn plus_one() -> f64 {
    1.0
}

fn yes() -> bool {
    true
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            lambda: 1,
            radius: 64,
            sigma: 1.0,
            nonlinear: true,
        }
    }
}

pub struct Solver {
    pub config: SolverConfig,
    n: usize,
    xi: Vec<f64>,
    eta: Vec<f64>,
    phi: Vec<f64>,
    keep: Vec<bool>,
    rows: Vec<bool>,
    fft: FftN,
    work: Mutex<[Vec<Complex64>; 5]>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverState {
    pub t: f64,
    pub lattice: DualLattice,
    /// largest kept integer index per axis, ⌊n/3⌋
    pub dealias_radius: i64,
    n: usize,
    hat: Vec<Complex64>,
}

impl SolverState {
    fn offset(&self, a: i64, b: i64) -> Option<usize> {
        let n = self.n as i64;
        if a < -n / 2 || a >= n / 2 || b < -n / 2 || b >= n / 2 {
            return None;
        }
        Some((a.rem_euclid(n) * n + b.rem_euclid(n)) as usize)
    }

    pub fn grid_size(&self) -> usize {
        self.n
    }

    /// û at integer index (a, b), i.e. frequency (a/λ, b/λ).
    pub fn mode(&self, a: i64, b: i64) -> Complex64 {
        self.offset(a, b).map_or(ZERO, |i| self.hat[i])
    }

    pub fn set_mode(&mut self, a: i64, b: i64, v: Complex64) -> Result<()> {
        if a.abs() > self.dealias_radius || b.abs() > self.dealias_radius {
            return Err(ZkError::TruncationExceeded {
                needed: a.abs().max(b.abs()),
                have: self.dealias_radius,
            });
        }
        let i = self.offset(a, b).expect("inside the grid");
        self.hat[i] = v;
        Ok(())
    }

    pub fn indices(&self) -> impl Iterator<Item = (i64, i64)> + '_ {
        let n = self.n as i64;
        (0..n * n).map(move |i| {
            let (p, q) = (i / n, i % n);
            (if p < n / 2 { p } else { p - n }, if q < n / 2 { q } else { q - n })
        })
    }

    pub fn raw(&self) -> &[Complex64] {
        &self.hat
    }

    pub fn coeffs(&self) -> GridFunction {
        let mut g = GridFunction::zeros(self.lattice);
        for ((a, b), v) in self.indices().zip(&self.hat) {
            if *v != ZERO {
                let _ = g.set(FreqIndex::new(a, b, self.lattice.lambda), *v);
            }
        }
        g
    }

    pub fn max_abs(&self) -> f64 {
        self.hat.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// max |û(−k) − conj û(k)|
    pub fn hermitian_defect(&self) -> f64 {
        self.indices()
            .zip(&self.hat)
            .map(|((a, b), v)| (self.mode(-a, -b) - v.conj()).norm())
            .fold(0.0, f64::max)
    }

    /// (Σ (1+|k|²)^s |û(k)|²)^{1/2}
    pub fn hs_norm(&self, s: f64) -> f64 {
        let l2 = (self.lattice.lambda as f64).powi(2);
        self.indices()
            .zip(&self.hat)
            .map(|((a, b), v)| (1.0 + (a * a + b * b) as f64 / l2).powf(s) * v.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    pub fn rel_distance(&self, other: &SolverState) -> f64 {
        let d: f64 = self.hat.iter().zip(&other.hat).map(|(a, b)| (a - b).norm_sqr()).sum();
        let s: f64 = other.hat.iter().map(|b| b.norm_sqr()).sum();
        (d / s.max(f64::MIN_POSITIVE)).sqrt()
    }
}

/// e^{iφh} and e^{iφh/2} for one step size.
pub struct Propagator {
    pub dt: f64,
    full: Vec<Complex64>,
    half: Vec<Complex64>,
}

impl Solver {
    pub fn new(config: SolverConfig) -> Result<Self> {
        let lattice = DualLattice::new(config.lambda, config.radius)?;
        let n = 2 * lattice.max_index() as usize;
        let lam = config.lambda as f64;
        let cut = (n / 3) as i64;
        let idx = |p: usize| if p < n / 2 { p as i64 } else { p as i64 - n as i64 };
        let mut xi = vec![0.0; n * n];
        let mut eta = vec![0.0; n * n];
        let mut phi = vec![0.0; n * n];
        let mut keep = vec![false; n * n];
        for p in 0..n {
            for q in 0..n {
                let (a, b) = (idx(p), idx(q));
                let i = p * n + q;
                xi[i] = a as f64 / lam;
                eta[i] = b as f64 / lam;
                phi[i] = xi[i].powi(3) + xi[i] * eta[i] * eta[i];
                keep[i] = a.abs() <= cut && b.abs() <= cut;
            }
        }
        Ok(Self {
            config,
            n,
            xi,
            eta,
            phi,
            keep,
            rows: (0..n).map(|p| idx(p).abs() <= cut).collect(),
            fft: FftN::new(&[n, n]),
            work: Mutex::new(std::array::from_fn(|_| vec![ZERO; n * n])),
        })
    }

    pub fn lattice(&self) -> DualLattice {
        DualLattice {
            lambda: self.config.lambda,
            radius: self.config.radius,
        }
    }

    pub fn zero_state(&self) -> SolverState {
        SolverState {
            t: 0.0,
            lattice: self.lattice(),
            dealias_radius: (self.n / 3) as i64,
            n: self.n,
            hat: vec![ZERO; self.n * self.n],
        }
    }

    /// Grid values u(x_j), x_j = 2πλ j / n.
    pub fn physical(&self, state: &SolverState) -> Vec<Complex64> {
        let mut u = state.hat.clone();
        self.fft.inverse(&mut u);
        u
    }

    pub fn sup_norm(&self, state: &SolverState) -> f64 {
        self.physical(state).iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// 0.5 / (K·max(1, ‖u‖∞))
    pub fn dt_max(&self, state: &SolverState) -> f64 {
        0.5 / (self.config.radius as f64 * self.sup_norm(state).max(1.0))
    }

    pub fn propagator(&self, dt: f64) -> Propagator {
        let cis = |h: f64| self.phi.iter().map(|p| Complex64::from_polar(1.0, p * h)).collect();
        Propagator {
            dt,
            full: cis(dt),
            half: cis(dt / 2.0),
        }
    }

    /// Writes σ P(u ∂ₓu)^ = σ (iξ/2) (u²)^ on the dealiased band into
    /// `out` and returns ‖u‖∞.
    fn nonlinear(&self, hat: &[Complex64], out: &mut [Complex64]) -> f64 {
        out.copy_from_slice(hat);
        self.fft.inverse_rows(out, &self.rows);
        let sup = out.iter().map(|v| v.norm_sqr()).fold(0.0, f64::max).sqrt();
        if !self.config.nonlinear {
            out.fill(ZERO);
            return sup;
        }
        for v in out.iter_mut() {
            *v = *v * *v;
        }
        self.fft.forward_rows(out, &self.rows);
        let scale = self.config.sigma * 0.5 / (self.n * self.n) as f64;
        for (i, v) in out.iter_mut().enumerate() {
            *v = if self.keep[i] {
                Complex64::new(0.0, self.xi[i] * scale) * *v
            } else {
                ZERO
            };
        }
        sup
    }

    fn advance(&self, state: &SolverState, p: &Propagator) -> Result<SolverState> {
        let h = p.dt;
        let c = &state.hat;
        let (e, eh) = (&p.full, &p.half);
        let mut guard = self.work.lock().unwrap_or_else(|x| x.into_inner());
        let [k1, k2, k3, k4, tmp] = &mut *guard;
        let sup = self.nonlinear(c, k1);
        let dt_max = 0.5 / (self.config.radius as f64 * sup.max(1.0));
        if h.abs() > dt_max {
            return Err(ZkError::StepTooLarge { dt: h, dt_max });
        }
        for i in 0..c.len() {
            tmp[i] = eh[i] * (c[i] + 0.5 * h * k1[i]);
        }
        self.nonlinear(tmp, k2);
        for i in 0..c.len() {
            tmp[i] = eh[i] * c[i] + 0.5 * h * k2[i];
        }
        self.nonlinear(tmp, k3);
        for i in 0..c.len() {
            tmp[i] = e[i] * c[i] + h * eh[i] * k3[i];
        }
        self.nonlinear(tmp, k4);
        let hat = (0..c.len())
            .map(|i| {
                if !self.keep[i] {
                    return ZERO;
                }
                e[i] * c[i] + h / 6.0 * (e[i] * k1[i] + 2.0 * eh[i] * (k2[i] + k3[i]) + k4[i])
            })
            .collect();
        Ok(SolverState {
            t: state.t + h,
            hat,
            ..state.clone()
        })
    }

    /// One integrating-factor RK4 step; dt may be negative.
    pub fn step(&self, state: &SolverState, dt: f64) -> Result<SolverState> {
        let p = self.propagator(dt);
        self.step_with(state, &p)
    }

    pub fn step_with(&self, state: &SolverState, p: &Propagator) -> Result<SolverState> {
        self.advance(state, p)
    }

    /// `steps` steps of size dt; `observe` sees the state after every step.
    pub fn evolve<F: FnMut(&SolverState)>(
        &self,
        state: &SolverState,
        dt: f64,
        steps: usize,
        mut observe: F,
    ) -> Result<SolverState> {
        let p = self.propagator(dt);
        let mut s = state.clone();
        for _ in 0..steps {
            s = self.step_with(&s, &p)?;
            observe(&s);
        }
        Ok(s)
    }

    /// The exact free flow e^{iφt}û₀.
    pub fn linear_flow(&self, state: &SolverState, t: f64) -> SolverState {
        let p = self.propagator(t);
        SolverState {
            t: state.t + t,
            hat: state.hat.iter().zip(&p.full).map(|(c, e)| c * e).collect(),
            ..state.clone()
        }
    }

    /// (M, E) with M = ∫u² and E = ∫|∇u|²/2 + σu³/6, the pair conserved by
    /// this flow.
    pub fn conserved_quantities(&self, state: &SolverState) -> Result<(f64, f64)> {
        let scale = state.max_abs().max(1.0);
        let defect = state.hermitian_defect();
        if defect > 1e-10 * scale {
            return Err(ZkError::NotRealData(defect));
        }
        let area = (2.0 * std::f64::consts::PI * self.config.lambda as f64).powi(2);
        let mass = area * state.hat.iter().map(|v| v.norm_sqr()).sum::<f64>();
        let grad = area
            * state
                .hat
                .iter()
                .enumerate()
                .map(|(i, v)| (self.xi[i].powi(2) + self.eta[i].powi(2)) * v.norm_sqr())
                .sum::<f64>()
            / 2.0;
        let u = self.physical(state);
        let cubic = area * u.iter().map(|v| v.re.powi(3)).sum::<f64>() / (self.n * self.n) as f64;
        Ok((mass, grad + self.config.sigma * cubic / 6.0))
    }
}

/// Real data with û(k) = amp·e^{−|k|}·g_k, g_k complex Gaussian, Hermitian,
/// on the dealiased band.
pub fn random_smooth_real(solver: &Solver, amp: f64, seed: u64) -> SolverState {
    let mut s = solver.zero_state();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = s.dealias_radius;
    let lam = solver.config.lambda as f64;
    for a in 0..=m {
        for b in -m..=m {
            if a == 0 && b < 0 {
                continue;
            }
            let (g1, g2): (f64, f64) = (rng.sample(StandardNormal), rng.sample(StandardNormal));
            let w = amp * (-(((a * a + b * b) as f64).sqrt() / lam)).exp();
            let v = if a == 0 && b == 0 {
                Complex64::new(w * g1, 0.0)
            } else {
                Complex64::new(w * g1, w * g2) / 2f64.sqrt()
            };
            s.set_mode(a, b, v).unwrap();
            s.set_mode(-a, -b, v.conj()).unwrap();
        }
    }
    s
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeHistory {
    pub target: [i64; 2],
    pub t: Vec<f64>,
    pub mode: Vec<Complex64>,
    /// max over samples of |û(k)| with k₂ ≠ 0
    pub max_off_axis: f64,
    /// max over samples of |û(k)| with k₁ < 0
    pub max_negative: f64,
    pub hs: Vec<Vec<f64>>,
    pub s_values: Vec<f64>,
    pub dt: f64,
    pub dt_max_initial: f64,
}

impl ModeHistory {
    /// Least-squares slope of ln|û| against t.
    pub fn fitted_rate(&self) -> f64 {
        let pts: Vec<(f64, f64)> = self
            .t
            .iter()
            .zip(&self.mode)
            .filter(|(_, v)| v.norm() > 0.0)
            .map(|(t, v)| (*t, v.norm().ln()))
            .collect();
        let n = pts.len() as f64;
        let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mt).powi(2)).sum();
        sxy / sxx
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InflationParams {
    #[serde(rename = "A")]
    pub a: f64,
    #[serde(rename = "B")]
    pub b: f64,
    #[serde(rename = "N")]
    pub n: i64,
}

fn track(
    solver: &Solver,
    init: SolverState,
    target: [i64; 2],
    t_end: f64,
    dt: f64,
    sample_every: usize,
    s_values: &[f64],
) -> Result<ModeHistory> {
    let steps = (t_end / dt).round() as usize;
    let sample_every = sample_every.max(1);
    let mut h = ModeHistory {
        target,
        t: vec![0.0],
        mode: vec![init.mode(target[0], target[1])],
        max_off_axis: 0.0,
        max_negative: 0.0,
        hs: vec![s_values.iter().map(|&s| init.hs_norm(s)).collect()],
        s_values: s_values.to_vec(),
        dt,
        dt_max_initial: solver.dt_max(&init),
    };
    let p = solver.propagator(dt);
    let mut s = init;
    for i in 1..=steps {
        s = solver.step_with(&s, &p)?;
        if i % sample_every == 0 || i == steps {
            h.t.push(s.t);
            h.mode.push(s.mode(target[0], target[1]));
            h.hs.push(s_values.iter().map(|&x| s.hs_norm(x)).collect());
            for ((a, b), v) in s.indices().zip(s.raw()) {
                if b != 0 {
                    h.max_off_axis = h.max_off_axis.max(v.norm());
                }
                if a < 0 {
                    h.max_negative = h.max_negative.max(v.norm());
                }
            }
        }
    }
    Ok(h)
}

/// u₀ = iA + B e^{iNx}; tracks û(t,(N,0)).
pub fn run_norm_inflation_1(
    solver: &Solver,
    p: InflationParams,
    t_end: f64,
    dt: f64,
    sample_every: usize,
    s_values: &[f64],
) -> Result<ModeHistory> {
    let lam = solver.config.lambda as i64;
    let mut u = solver.zero_state();
    u.set_mode(0, 0, Complex64::new(0.0, p.a))?;
    u.set_mode(p.n * lam, 0, Complex64::new(p.b, 0.0))?;
    track(solver, u, [p.n * lam, 0], t_end, dt, sample_every, s_values)
}

/// u₀ = A e^{2iy} + B e^{i(Nx−y)}; tracks the product mode û(t,(N,1)).
pub fn run_norm_inflation_2(
    solver: &Solver,
    p: InflationParams,
    t_end: f64,
    dt: f64,
    sample_every: usize,
    s_values: &[f64],
) -> Result<ModeHistory> {
    let lam = solver.config.lambda as i64;
    let mut u = solver.zero_state();
    u.set_mode(0, 2 * lam, Complex64::new(p.a, 0.0))?;
    u.set_mode(p.n * lam, -lam, Complex64::new(p.b, 0.0))?;
    track(solver, u, [p.n * lam, lam], t_end, dt, sample_every, s_values)
}
