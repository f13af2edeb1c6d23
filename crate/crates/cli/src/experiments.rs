//! Config schemas and runners, one per experiment id.

use std::collections::BTreeMap;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Deserialize;

use zkw_core::freq_decomposition::{
    annular_multiplicity, flat_cover, whitney_cover, Cover, FlatRegion, Slack, TransverseRegion,
    WhitneyTile,
};
use zkw_core::lattice_counting::{
    count_strip, count_strip_bruteforce, count_strip_irrational_torus, liouville_floor, Strip,
};
use zkw_core::spectral_lattice::DualLattice;
use zkw_core::thickened_surfaces::{
    fitted_exponent, product_min_det, restricted_transversality_counterexample,
    triple_intersection_volume, SurfaceSpec, VolumeMethod,
};
use zkw_core::trilinear_forms::{
    bound_ratio_sweep, mod_norm, overlap_kernel, sharpness_triple, trilinear_form,
    weighted_trilinear_form, SweepConfig, SweepKind, TrilinearReport, Weight,
};
use zkw_core::zk_solver::{
    random_smooth_real, run_norm_inflation_1, run_norm_inflation_2, InflationParams, ModeHistory,
    Solver, SolverConfig,
};

use crate::{fmt, CliError, Outcome, Result, Table};

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "experiment")]
#[allow(clippy::large_enum_variant)]
pub enum ExperimentConfig {
    #[serde(rename = "solve")]
    Solve(SolveConfig),
    #[serde(rename = "norm-inflation-1")]
    NormInflation1(InflationConfig),
    #[serde(rename = "norm-inflation-2")]
    NormInflation2(InflationConfig),
    #[serde(rename = "trilinear-sweep")]
    TrilinearSweep(SweepRunConfig),
    #[serde(rename = "weighted-trilinear")]
    WeightedTrilinear(WeightedConfig),
    #[serde(rename = "counting")]
    Counting(CountingConfig),
    #[serde(rename = "decompose")]
    Decompose(DecomposeConfig),
    #[serde(rename = "thickened")]
    Thickened(ThickenedConfig),
    #[serde(rename = "counterexample")]
    Counterexample(CounterexampleConfig),
}

impl ExperimentConfig {
    pub fn seed(&self) -> Option<u64> {
        match self {
            Self::Solve(c) => c.seed,
            Self::NormInflation1(c) | Self::NormInflation2(c) => c.seed,
            Self::TrilinearSweep(c) => c.seed,
            Self::WeightedTrilinear(_) | Self::Decompose(_) => None,
            Self::Counting(c) => c.seed,
            Self::Thickened(c) => c.seed,
            Self::Counterexample(c) => c.seed,
        }
    }

    pub fn randomized(&self) -> bool {
        match self {
            Self::Solve(c) => c.init == InitKind::RandomSmooth,
            Self::NormInflation1(_) | Self::NormInflation2(_) => false,
            Self::WeightedTrilinear(_) | Self::Decompose(_) => false,
            _ => true,
        }
    }

    pub fn run(&self, seed: Option<u64>) -> Result<Outcome> {
        let need = || {
            seed.ok_or_else(|| CliError::ConfigInvalid("this experiment needs a seed".into()))
        };
        match self {
            Self::Solve(c) => {
                let s = if c.init == InitKind::RandomSmooth { need()? } else { 0 };
                solve(c, s)
            }
            Self::NormInflation1(c) => inflation(c, 1),
            Self::NormInflation2(c) => inflation(c, 2),
            Self::TrilinearSweep(c) => sweep(c, need()?),
            Self::WeightedTrilinear(c) => weighted(c),
            Self::Counting(c) => counting(c, need()?),
            Self::Decompose(c) => decompose(c),
            Self::Thickened(c) => thickened(c, need()?),
            Self::Counterexample(c) => counterexample(c, need()?),
        }
    }
}

/// A ready-to-run config for each experiment id.
pub fn default_config(experiment: &str) -> String {
    let body = match experiment {
        "solve" => r#""seed": 42, "lambda": 1, "radius": 32, "dt": 1e-4, "T": 0.1"#,
        "norm-inflation-1" => r#""params": {"A": 1.0, "B": 1.0, "N": 16}"#,
        "norm-inflation-2" => r#""params": {"A": 1.0, "B": 1.0, "N": 16}"#,
        "trilinear-sweep" => r#""seed": 42, "n_values": [16, 32, 64, 128], "instances_per_n": 128"#,
        "weighted-trilinear" => "",
        "counting" => r#""seed": 42"#,
        "decompose" => "",
        "thickened" => {
            r#""seed": 42, "surfaces": [
    {"kind": {"type": "plane", "normal": [1, 0, 0], "c": 0}, "eps": 0.125, "domain": [[-0.25, 0.25], [-0.25, 0.25], [-0.25, 0.25]]},
    {"kind": {"type": "plane", "normal": [0, 1, 0], "c": 0}, "eps": 0.125, "domain": [[-0.25, 0.25], [-0.25, 0.25], [-0.25, 0.25]]},
    {"kind": {"type": "plane", "normal": [0, 0, 1], "c": 0}, "eps": 0.125, "domain": [[-0.25, 0.25], [-0.25, 0.25], [-0.25, 0.25]]}
  ], "method": "grid", "resolution": 0.015625"#
        }
        "counterexample" => r#""seed": 42"#,
        _ => "",
    };
    if body.is_empty() {
        format!("{{\n  \"experiment\": \"{experiment}\"\n}}\n")
    } else {
        format!("{{\n  \"experiment\": \"{experiment}\",\n  {body}\n}}\n")
    }
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitKind {
    RandomSmooth,
    Cosine,
}

fn d_init() -> InitKind {
    InitKind::RandomSmooth
}
fn d_lambda() -> u32 {
    1
}
fn d_radius32() -> u32 {
    32
}
fn d_radius64() -> u32 {
    64
}
fn d_mode() -> [i64; 2] {
    [1, 0]
}
fn d_every10() -> usize {
    10
}
fn d_every100() -> usize {
    100
}
fn d_s12() -> Vec<f64> {
    vec![1.0, 2.0]
}
fn d_s1() -> Vec<f64> {
    vec![1.0]
}
fn d_dt_inflation() -> f64 {
    1e-5
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveConfig {
    pub seed: Option<u64>,
    #[serde(default = "d_lambda")]
    pub lambda: u32,
    #[serde(default = "d_radius32")]
    pub radius: u32,
    pub dt: f64,
    #[serde(rename = "T")]
    pub t: f64,
    #[serde(default = "one")]
    pub sigma: f64,
    #[serde(default = "one")]
    pub amplitude: f64,
    #[serde(default = "d_init")]
    pub init: InitKind,
    #[serde(default = "d_mode")]
    pub target_mode: [i64; 2],
    #[serde(default = "d_every10")]
    pub sample_every: usize,
    #[serde(default = "d_s12")]
    pub s_values: Vec<f64>,
}

fn hs_header(s: &[f64]) -> String {
    s.iter().map(|x| format!(",hs_{x}")).collect()
}

fn hs_cells(v: &[f64]) -> String {
    v.iter().map(|x| format!(",{}", fmt(*x))).collect()
}

fn solve(c: &SolveConfig, seed: u64) -> Result<Outcome> {
    let solver = Solver::new(SolverConfig {
        lambda: c.lambda,
        radius: c.radius,
        sigma: c.sigma,
        nonlinear: true,
    })?;
    let u0 = match c.init {
        InitKind::RandomSmooth => random_smooth_real(&solver, c.amplitude, seed),
        InitKind::Cosine => {
            let mut u = solver.zero_state();
            let l = c.lambda as i64;
            let half = Complex64::new(c.amplitude / 2.0, 0.0);
            u.set_mode(l, 0, half)?;
            u.set_mode(-l, 0, half)?;
            u
        }
    };
    let dt_max = solver.dt_max(&u0);
    let steps = (c.t / c.dt).round() as usize;
    let every = c.sample_every.max(1);
    let mut table = Table::new(
        "solve.csv",
        &format!("t,abs_mode,mass,energy{}", hs_header(&c.s_values)),
    );
    let row = |u: &zkw_core::zk_solver::SolverState| -> Result<String> {
        let (m, e) = solver.conserved_quantities(u)?;
        let hs: Vec<f64> = c.s_values.iter().map(|&s| u.hs_norm(s)).collect();
        Ok(format!(
            "{},{},{},{}{}",
            fmt(u.t),
            fmt(u.mode(c.target_mode[0], c.target_mode[1]).norm()),
            fmt(m),
            fmt(e),
            hs_cells(&hs)
        ))
    };
    table.push(row(&u0)?);
    let p = solver.propagator(c.dt);
    let mut u = u0.clone();
    for i in 1..=steps {
        u = solver.step_with(&u, &p)?;
        if i % every == 0 || i == steps {
            table.push(row(&u)?);
        }
    }
    let (m0, e0) = solver.conserved_quantities(&u0)?;
    let (m1, e1) = solver.conserved_quantities(&u)?;
    let mut metrics = BTreeMap::new();
    metrics.insert("mass_drift".into(), ((m1 - m0) / m0).abs());
    metrics.insert("energy_drift".into(), ((e1 - e0) / e0).abs());
    metrics.insert("hermitian_defect".into(), u.hermitian_defect());
    metrics.insert("dt_max_initial".into(), dt_max);
    Ok(Outcome {
        tables: vec![table],
        metrics,
        skipped_fraction: 0.0,
    })
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InflationConfig {
    pub seed: Option<u64>,
    #[serde(default = "d_lambda")]
    pub lambda: u32,
    #[serde(default = "d_radius64")]
    pub radius: u32,
    #[serde(default = "d_dt_inflation")]
    pub dt: f64,
    #[serde(rename = "T")]
    pub t: Option<f64>,
    #[serde(default = "one")]
    pub sigma: f64,
    pub params: InflationParams,
    #[serde(default = "d_every100")]
    pub sample_every: usize,
    #[serde(default = "d_s1")]
    pub s_values: Vec<f64>,
}

impl InflationConfig {
    pub fn horizon(&self, which: u8) -> f64 {
        self.t.unwrap_or(if which == 1 {
            4.0 / (self.params.n as f64 * self.params.a)
        } else {
            1e-2
        })
    }

    pub fn history(&self, which: u8) -> Result<ModeHistory> {
        let solver = Solver::new(SolverConfig {
            lambda: self.lambda,
            radius: self.radius,
            sigma: self.sigma,
            nonlinear: true,
        })?;
        let t = self.horizon(which);
        let h = if which == 1 {
            run_norm_inflation_1(&solver, self.params, t, self.dt, self.sample_every, &self.s_values)?
        } else {
            run_norm_inflation_2(&solver, self.params, t, self.dt, self.sample_every, &self.s_values)?
        };
        Ok(h)
    }
}

/// max over t ∈ [1e−3, 1e−2] of | |û(t)|/(N t AB) − 1 |
pub fn linear_growth_deviation(h: &ModeHistory, p: &InflationParams) -> f64 {
    h.t.iter()
        .zip(&h.mode)
        .filter(|(t, _)| **t >= 1e-3 - 1e-12 && **t <= 1e-2 + 1e-12)
        .map(|(t, v)| (v.norm() / (p.n as f64 * t * p.a * p.b) - 1.0).abs())
        .fold(0.0, f64::max)
}

fn inflation(c: &InflationConfig, which: u8) -> Result<Outcome> {
    let h = c.history(which)?;
    let mut table = Table::new(
        &format!("norm_inflation_{which}.csv"),
        &format!("t,abs_mode,re,im,mass,energy{}", hs_header(&c.s_values)),
    );
    for ((t, v), hs) in h.t.iter().zip(&h.mode).zip(&h.hs) {
        // complex data: the real-data invariants are not defined
        table.push(format!(
            "{},{},{},{},nan,nan{}",
            fmt(*t),
            fmt(v.norm()),
            fmt(v.re),
            fmt(v.im),
            hs_cells(hs)
        ));
    }
    let mut metrics = BTreeMap::new();
    let p = c.params;
    if which == 1 {
        let rate = h.fitted_rate();
        metrics.insert("fitted_rate".into(), rate);
        metrics.insert("rate_over_na".into(), rate.abs() / (p.n as f64 * p.a));
        metrics.insert("max_off_axis".into(), h.max_off_axis);
        metrics.insert("max_negative".into(), h.max_negative);
    } else {
        metrics.insert("linear_growth_deviation".into(), linear_growth_deviation(&h, &p));
    }
    metrics.insert("final_abs_mode".into(), h.mode.last().map_or(0.0, |v| v.norm()));
    metrics.insert("dt_max_initial".into(), h.dt_max_initial);
    Ok(Outcome {
        tables: vec![table],
        metrics,
        skipped_fraction: 0.0,
    })
}

fn d_kinds() -> Vec<SweepKind> {
    vec![SweepKind::PeriodicNlw, SweepKind::NlwZk]
}
fn d_patch() -> f64 {
    1.0 / 16.0
}
fn d_a_max() -> f64 {
    16.0
}
fn d_attempts() -> usize {
    64
}
fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepRunConfig {
    pub seed: Option<u64>,
    #[serde(default = "d_kinds")]
    pub kinds: Vec<SweepKind>,
    pub n_values: Vec<u32>,
    pub instances_per_n: usize,
    #[serde(default = "d_patch")]
    pub patch: f64,
    #[serde(default = "d_a_max")]
    pub a_max: f64,
    #[serde(default = "d_attempts")]
    pub max_attempts: usize,
    #[serde(default = "yes")]
    pub resonant: bool,
}

fn kind_name(k: SweepKind) -> &'static str {
    match k {
        SweepKind::PeriodicNlw => "periodic_nlw",
        SweepKind::NlwZk => "nlw_zk",
    }
}

fn sweep(c: &SweepRunConfig, seed: u64) -> Result<Outcome> {
    let mut table = Table::new("sweep.csv", TrilinearReport::CSV_HEADER);
    let mut metrics = BTreeMap::new();
    let (mut skipped, mut attempted) = (0, 0);
    let mut dispersion: f64 = 0.0;
    for (ki, kind) in c.kinds.iter().enumerate() {
        let cfg = SweepConfig {
            kind: *kind,
            n_values: c.n_values.clone(),
            instances_per_n: c.instances_per_n,
            patch: c.patch,
            a_max: c.a_max,
            max_attempts: c.max_attempts,
            resonant: c.resonant,
        };
        // one master seed, one stream family per kind
        let out = bound_ratio_sweep(&cfg, seed.wrapping_add(ki as u64 * 0x9e37_79b9))?;
        for r in &out.reports {
            table.push(r.csv_row());
        }
        skipped += out.skipped;
        attempted += out.attempted;
        let name = kind_name(*kind);
        let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
        for n in &c.n_values {
            let m = out.max_ratio_at(*n as f64);
            metrics.insert(format!("{name}_max_ratio_N{n}"), m);
            lo = lo.min(m);
            hi = hi.max(m);
        }
        if hi >= lo {
            dispersion = dispersion.max(hi - lo);
        }
        if let (Some(first), Some(last)) = (c.n_values.first(), c.n_values.last()) {
            let a = out.max_ratio_at(*first as f64);
            let b = out.max_ratio_at(*last as f64);
            metrics.insert(format!("{name}_growth_factor"), if a > 0.0 { b / a } else { f64::INFINITY });
        }
        metrics.insert(format!("{name}_instances"), out.reports.len() as f64);
        metrics.insert(format!("{name}_skipped"), out.skipped as f64);
    }
    // spread of the per-N maxima: how far the max statistic moves between samples
    metrics.insert("dispersion".into(), dispersion);
    Ok(Outcome {
        tables: vec![table],
        metrics,
        skipped_fraction: if attempted == 0 { 0.0 } else { skipped as f64 / attempted as f64 },
    })
}

fn d_sharp_n() -> Vec<i64> {
    vec![8, 16, 32, 64]
}
fn d_sharp_ls() -> Vec<[f64; 3]> {
    vec![[0.25, 0.25, 0.5], [0.1, 0.7, 0.8], [1.0, 3.0, 4.0], [0.25, 1.0, 1.0], [0.5, 0.5, 1.0]]
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightedConfig {
    #[serde(default = "d_sharp_n")]
    pub n_values: Vec<i64>,
    #[serde(default = "d_sharp_ls")]
    pub modulations: Vec<[f64; 3]>,
}

/// One row of the single-mode sharpness table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SharpnessRow {
    pub n: i64,
    pub l: [f64; 3],
    pub value: f64,
    pub ratio: f64,
    pub weighted_value: f64,
    pub weighted_ratio: f64,
}

pub fn sharpness_row(n: i64, l: [f64; 3]) -> Result<SharpnessRow> {
    let [f1, f2, f3] = sharpness_triple(n, l)?;
    let norms = mod_norm(&f1) * mod_norm(&f2) * mod_norm(&f3);
    let value = trilinear_form(&f1, &f2, &f3)?;
    let weighted_value = weighted_trilinear_form(&f1, &f2, &f3, Weight::Symmetrized)?;
    Ok(SharpnessRow {
        n,
        l,
        value,
        ratio: value / norms,
        weighted_value,
        weighted_ratio: weighted_value / norms,
    })
}

fn weighted(c: &WeightedConfig) -> Result<Outcome> {
    let mut table = Table::new(
        "sharpness.csv",
        "N,L1,L2,L3,value,kernel,ratio,weighted_value,weighted_ratio,weighted_over_3N_sqrtLmin",
    );
    let mut worst_kernel: f64 = 0.0;
    let mut lo = f64::INFINITY;
    let mut hi: f64 = 0.0;
    for &n in &c.n_values {
        for l in &c.modulations {
            let r = sharpness_row(n, *l)?;
            let kernel = overlap_kernel(0.0, l[0], l[1], l[2]);
            let lmin = l[0].min(l[1]).min(l[2]);
            let norm = r.weighted_ratio / (3.0 * n as f64 * lmin.sqrt());
            worst_kernel = worst_kernel.max((r.value - kernel).abs() / kernel);
            lo = lo.min(norm);
            hi = hi.max(norm);
            table.push(format!(
                "{n},{},{},{},{},{},{},{},{},{}",
                fmt(l[0]),
                fmt(l[1]),
                fmt(l[2]),
                fmt(r.value),
                fmt(kernel),
                fmt(r.ratio),
                fmt(r.weighted_value),
                fmt(r.weighted_ratio),
                fmt(norm)
            ));
        }
    }
    let mut metrics = BTreeMap::new();
    metrics.insert("max_rel_error_vs_kernel".into(), worst_kernel);
    metrics.insert("min_weighted_normalized".into(), lo);
    metrics.insert("max_weighted_normalized".into(), hi);
    Ok(Outcome {
        tables: vec![table],
        metrics,
        skipped_fraction: 0.0,
    })
}

fn d_samples() -> usize {
    1000
}
fn d_lw_max() -> f64 {
    64.0
}
fn d_lambdas() -> Vec<u32> {
    vec![1, 2, 3]
}
fn d_bound_c() -> f64 {
    64.0
}
fn d_w() -> f64 {
    0.01
}
fn d_ells() -> Vec<f64> {
    vec![8.0, 16.0, 32.0, 64.0]
}
fn d_irr_radius() -> u32 {
    512
}
fn d_qmax() -> u64 {
    100_000
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CountingConfig {
    pub seed: Option<u64>,
    #[serde(default = "d_samples")]
    pub samples: usize,
    #[serde(default = "d_lw_max")]
    pub lw_max: f64,
    #[serde(default = "d_lambdas")]
    pub lambdas: Vec<u32>,
    #[serde(default = "d_bound_c")]
    pub bound_constant: f64,
    #[serde(default = "d_w")]
    pub irrational_w: f64,
    #[serde(default = "d_ells")]
    pub irrational_ells: Vec<f64>,
    #[serde(default = "d_irr_radius")]
    pub irrational_radius: u32,
    #[serde(default = "d_qmax")]
    pub liouville_q_max: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CountSample {
    pub ell: f64,
    pub w: f64,
    pub alpha: [f64; 2],
    pub lambda: u32,
    pub count: u64,
    pub columns: u64,
}

/// ℓ log-uniform in [1, ℓw_max], ℓw log-uniform in [1, ℓw_max], α ∈ [0,1)²,
/// λ uniform in `lambdas`; instance i uses stream i of the master seed.
pub fn counting_samples(c: &CountingConfig, seed: u64) -> Result<Vec<CountSample>> {
    (0..c.samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let top = c.lw_max.ln();
            let ell = rng.gen_range(0.0..=top).exp();
            let lw = rng.gen_range(0.0..=top).exp();
            let w = lw / ell;
            let alpha = [rng.gen::<f64>(), rng.gen::<f64>()];
            let lambda = c.lambdas[rng.gen_range(0..c.lambdas.len())];
            let strip = Strip::new(ell, w, alpha)?;
            let bb = strip.bbox();
            let reach = bb.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            let lattice = DualLattice::new(lambda, reach.ceil() as u32 + 1)?;
            Ok(CountSample {
                ell,
                w,
                alpha,
                lambda,
                count: count_strip_bruteforce(&strip, &lattice)?,
                columns: count_strip(&strip, &lattice)?,
            })
        })
        .collect::<std::result::Result<Vec<_>, zkw_core::ZkError>>()
        .map_err(CliError::from)
}

pub fn irrational_counts(c: &CountingConfig) -> Result<Vec<u64>> {
    c.irrational_ells
        .iter()
        .map(|&l| {
            let s = Strip::new(l, c.irrational_w, [0.0, 0.0])?;
            Ok(count_strip_irrational_torus(&s, 1, c.irrational_radius)?)
        })
        .collect()
}

fn counting(c: &CountingConfig, seed: u64) -> Result<Outcome> {
    let samples = counting_samples(c, seed)?;
    let mut t = Table::new("counting.csv", "ell,w,alpha1,alpha2,lambda,count,column_count,bound");
    let mut worst: f64 = 0.0;
    let mut mismatches = 0;
    for s in &samples {
        let bound = c.bound_constant * s.ell * s.w * (s.lambda as f64).powi(2);
        worst = worst.max(s.count as f64 / bound);
        if s.count != s.columns {
            mismatches += 1;
        }
        t.push(format!(
            "{},{},{},{},{},{},{},{}",
            fmt(s.ell),
            fmt(s.w),
            fmt(s.alpha[0]),
            fmt(s.alpha[1]),
            s.lambda,
            s.count,
            s.columns,
            fmt(bound)
        ));
    }
    let irr = irrational_counts(c)?;
    let mut ti = Table::new("irrational.csv", "ell,w,count");
    for (l, n) in c.irrational_ells.iter().zip(&irr) {
        ti.push(format!("{},{},{n}", fmt(*l), fmt(c.irrational_w)));
    }
    let min_growth = irr
        .windows(2)
        .map(|w| w[1] as f64 / w[0].max(1) as f64)
        .fold(f64::INFINITY, f64::min);
    let (floor, q, p) = liouville_floor(c.liouville_q_max);
    let mut metrics = BTreeMap::new();
    metrics.insert("max_count_over_bound".into(), worst);
    metrics.insert("column_mismatches".into(), mismatches as f64);
    metrics.insert("irrational_min_consecutive_ratio".into(), min_growth);
    metrics.insert("liouville_floor".into(), floor);
    metrics.insert("liouville_floor_q".into(), q as f64);
    metrics.insert("liouville_floor_p".into(), p as f64);
    Ok(Outcome {
        tables: vec![t, ti],
        metrics,
        skipped_fraction: 0.0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Square,
    Flat,
    Annular,
}

impl Family {
    fn name(&self) -> &'static str {
        match self {
            Family::Square => "square",
            Family::Flat => "flat",
            Family::Annular => "annular",
        }
    }
}

fn d_n1() -> Vec<u32> {
    vec![64, 128, 256]
}
fn d_families() -> Vec<Family> {
    vec![Family::Square, Family::Flat, Family::Annular]
}
fn d_square_a() -> [u32; 2] {
    [8, 32]
}
fn d_flat_d() -> [u32; 2] {
    [1, 8]
}
fn d_annular_a() -> [u32; 2] {
    [8, 64]
}
fn d_flat_c() -> f64 {
    4.0
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecomposeConfig {
    #[serde(default = "d_n1")]
    pub n1_values: Vec<u32>,
    #[serde(default = "d_families")]
    pub families: Vec<Family>,
    #[serde(default = "d_square_a")]
    pub square_scales: [u32; 2],
    #[serde(default = "d_flat_d")]
    pub flat_scales: [u32; 2],
    #[serde(default = "d_annular_a")]
    pub annular_scales: [u32; 2],
    #[serde(default = "d_flat_c")]
    pub flat_xi_sum_c: f64,
    #[serde(default = "yes")]
    pub dump_cover: bool,
}

/// (scale, statistic) → max multiplicity, for one family at one N₁.
pub type Profile = BTreeMap<(u32, &'static str), usize>;

fn cover_profile<T: WhitneyTile>(cover: &Cover<T>) -> Profile {
    let mut p = Profile::new();
    for (side, res, key) in [
        (1u8, false, "side1"),
        (2, false, "side2"),
        (1, true, "residual_side1"),
        (2, true, "residual_side2"),
    ] {
        for (s, m) in cover.multiplicity_profile(side, res) {
            p.insert((s, key), m);
        }
    }
    p
}

pub fn square_cover(n1: f64, scales: [u32; 2]) -> Cover<zkw_core::freq_decomposition::SquareTile> {
    let reg = TransverseRegion::new(n1);
    whitney_cover(n1, scales[0], scales[1], n1, Slack::Isotropic, move |a, b| {
        reg.accepts(&a.rect(), &b.rect())
    })
}

pub fn family_profile(c: &DecomposeConfig, family: Family, n1: u32) -> Profile {
    let n1f = n1 as f64;
    match family {
        Family::Square => cover_profile(&square_cover(n1f, c.square_scales)),
        Family::Flat => {
            let region = FlatRegion {
                n1: n1f,
                n3: n1f / 4.0,
                xi_sum_c: c.flat_xi_sum_c,
            };
            cover_profile(&flat_cover(region, c.flat_scales[0], c.flat_scales[1]))
        }
        Family::Annular => {
            let mut p = Profile::new();
            for (i, keys) in [(1u8, ["k1_per_m", "k1_per_k"]), (2, ["k2_per_m", "k2_per_k"])] {
                for m in annular_multiplicity(n1f, i, c.annular_scales[0], c.annular_scales[1]) {
                    p.insert((m.a, keys[0]), m.per_m);
                    p.insert((m.a, keys[1]), m.per_k);
                }
            }
            p
        }
    }
}

/// True when every statistic at every scale is non-increasing in N₁.
pub fn non_increasing(profiles: &[Profile]) -> bool {
    profiles.windows(2).all(|w| {
        w[1].iter().all(|(k, v)| w[0].get(k).is_some_and(|u| v <= u))
    })
}

fn decompose(c: &DecomposeConfig) -> Result<Outcome> {
    let mut tables = Vec::new();
    let mut metrics = BTreeMap::new();
    let mut mt = Table::new("multiplicity.csv", "family,N1,scale,statistic,max_multiplicity");
    for fam in &c.families {
        let mut profiles = Vec::new();
        for &n1 in &c.n1_values {
            let p = family_profile(c, *fam, n1);
            for ((s, k), m) in &p {
                mt.push(format!("{},{n1},{s},{k},{m}", fam.name()));
            }
            let max = p.values().copied().max().unwrap_or(0);
            metrics.insert(format!("{}_max_N{n1}", fam.name()), max as f64);
            profiles.push(p);
        }
        metrics.insert(
            format!("{}_non_increasing", fam.name()),
            if non_increasing(&profiles) { 1.0 } else { 0.0 },
        );
    }
    tables.push(mt);
    if c.dump_cover {
        if let Some(&n1) = c.n1_values.first() {
            let cover = square_cover(n1 as f64, c.square_scales);
            let mut t = Table::new(&format!("cover_square_N{n1}.csv"), "A,m1a,m1b,m2a,m2b,class");
            let mut rows: Vec<_> = cover
                .entries
                .iter()
                .map(|e| (e.scale, e.t1.m, e.t2.m, e.label.as_str()))
                .collect();
            rows.sort();
            for (a, m1, m2, l) in rows {
                t.push(format!("{a},{},{},{},{},{l}", m1[0], m1[1], m2[0], m2[1]));
            }
            tables.push(t);
        }
    }
    Ok(Outcome {
        tables,
        metrics,
        skipped_fraction: 0.0,
    })
}

fn d_method() -> VolumeMethod {
    VolumeMethod::Grid
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThickenedConfig {
    pub seed: Option<u64>,
    pub surfaces: [SurfaceSpec; 3],
    #[serde(default = "d_method")]
    pub method: VolumeMethod,
    pub resolution: f64,
}

fn thickened(c: &ThickenedConfig, seed: u64) -> Result<Outcome> {
    let [s1, s2, s3] = &c.surfaces;
    let v = triple_intersection_volume(s1, s2, s3, c.method, c.resolution, seed)?;
    let mut t = Table::new("volume.csv", "volume,error,min_det,A");
    t.push(format!("{},{},{},{}", fmt(v.volume), fmt(v.error), fmt(v.min_det), fmt(v.a)));
    let mut metrics = BTreeMap::new();
    metrics.insert("volume".into(), v.volume);
    metrics.insert("error".into(), v.error);
    metrics.insert("min_det".into(), v.min_det);
    Ok(Outcome {
        tables: vec![t],
        metrics,
        skipped_fraction: 0.0,
    })
}

fn d_rs() -> Vec<u32> {
    vec![8, 16, 32]
}
fn d_step() -> f64 {
    1.0 / 8192.0
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CounterexampleConfig {
    pub seed: Option<u64>,
    #[serde(default = "d_rs")]
    pub r_values: Vec<u32>,
    #[serde(default = "d_step")]
    pub step: f64,
}

fn counterexample(c: &CounterexampleConfig, seed: u64) -> Result<Outcome> {
    let mut t = Table::new(
        "counterexample.csv",
        "R,value,norm_product,ratio,single_ball_value,ball_volume,constrained_min_det",
    );
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut det = f64::INFINITY;
    for &r in &c.r_values {
        let rep = restricted_transversality_counterexample(r, c.step, seed)?;
        t.push(format!(
            "{r},{},{},{},{},{},{}",
            fmt(rep.value),
            fmt(rep.norm_product),
            fmt(rep.ratio),
            fmt(rep.single_ball_value),
            fmt(rep.ball_volume),
            fmt(rep.constrained_min_det)
        ));
        xs.push(r as f64);
        ys.push(rep.ratio);
        det = det.min(rep.constrained_min_det);
    }
    let mut metrics = BTreeMap::new();
    if xs.len() >= 2 {
        metrics.insert("fitted_exponent".into(), fitted_exponent(&xs, &ys));
    }
    metrics.insert("constrained_min_det".into(), det);
    metrics.insert("product_min_det".into(), product_min_det(1000, 4.0, seed));
    Ok(Outcome {
        tables: vec![t],
        metrics,
        skipped_fraction: 0.0,
    })
}
