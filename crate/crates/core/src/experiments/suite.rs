//! The full battery: every check group runs as an independent task and
//! the report lists them in a fixed order.

use std::f64::consts::PI;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::dims::{excursion_short_time, level_set_dimension, local_alpha, resolution_window, short_time_exponent};
use super::identities::{identity_suite, random_string_kernels, reconstruction_in_bracket, IdentityBudget};
use super::longtime::{longtime_checks, LongtimeSetup};
use super::simulation::{
    draw_anchor, excursion_rates, exit_times, harvest, inverse_local_time_increments, inverse_local_time_laplace,
    oracle_checks, reflecting_strings, time_reversal_ks,
};
use super::{Check, Report, Series};
use crate::error::{Error, Result};
use crate::krein::{
    heat_kernel, kac_exit, spectral_decompose, spectral_decompose_at, survival, two_sided_h, Boundary, KernelMode,
    SpectralBc, StieltjesString,
};
use crate::measures::{build_lebesgue, interval_mass, multifractal_alpha, sample_boundary_liouville, AtomicMeasure, GmcConfig, Kernel};
use crate::stats::mean_se;
use crate::{jsonio, rng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteConfig {
    pub gamma: f64,
    /// Depth `n` of the measure used for the slope statistics (`ε = 2^-n`).
    pub depth: u32,
    pub half_length: f64,
    /// Grid spacing; `None` means `δ = ε`.
    pub delta: Option<f64>,
    pub kernel: Kernel,
    pub seed: u64,
    /// Monte Carlo paths per simulated quantity.
    pub paths: usize,
    /// Measure samples for the normalization check.
    pub measure_seeds: usize,
    /// `(seed, a)` pairs for the local exponent means.
    pub alpha_pairs: usize,
    /// `(seed, a)` pairs per `q` for the dimension means.
    pub dim_pairs: usize,
    pub longtime_depth: u32,
    pub longtime_half_length: f64,
    pub longtime_delta: f64,
    /// Depth and window of the coarse measure that the simulators run on.
    pub sim_depth: u32,
    pub sim_half_length: f64,
    /// Worker threads; results do not depend on it, so it stays out of the
    /// serialized configuration.
    #[serde(skip)]
    pub threads: Option<usize>,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        SuiteConfig {
            gamma: 1.0,
            depth: 10,
            half_length: 4.0,
            delta: None,
            kernel: Kernel::TruncatedLogExactPd,
            seed: 1,
            paths: 10_000,
            measure_seeds: 200,
            alpha_pairs: 50,
            dim_pairs: 30,
            longtime_depth: 3,
            longtime_half_length: 500.0,
            longtime_delta: 0.125,
            sim_depth: 6,
            sim_half_length: 2.0,
            threads: None,
        }
    }
}

impl SuiteConfig {
    fn gmc(&self, depth: u32, half_length: f64, delta: Option<f64>, seed: u64) -> GmcConfig {
        let mut c = GmcConfig::new(self.gamma, depth, half_length, seed);
        c.kernel = self.kernel;
        if let Some(d) = delta {
            c.grid_spacing = d;
        }
        c
    }

    fn main_measure(&self, seed: u64) -> Result<AtomicMeasure> {
        sample_boundary_liouville(&self.gmc(self.depth, self.half_length, self.delta, seed))
    }

    fn sim_measure(&self) -> Result<AtomicMeasure> {
        sample_boundary_liouville(&self.gmc(self.sim_depth, self.sim_half_length, None, rng::child_seed(self.seed, 7)))
    }

    fn validate(&self) -> Result<()> {
        if self.paths < 100 || self.measure_seeds < 2 || self.alpha_pairs < 2 || self.dim_pairs < 1 {
            return Err(Error::invalid("suite budgets are too small"));
        }
        if self.half_length < 2.0 || self.sim_half_length < 2.0 {
            return Err(Error::invalid("suite windows need half-length at least 2"));
        }
        for c in [
            self.gmc(self.depth, self.half_length, self.delta, 0),
            self.gmc(self.sim_depth, self.sim_half_length, None, 0),
        ] {
            c.validate()?;
        }
        self.gmc(self.longtime_depth, self.longtime_half_length, Some(self.longtime_delta), 0).validate()
    }

    /// 64-bit FNV-1a of the serialized configuration.
    pub fn fingerprint(&self) -> Result<String> {
        let text = jsonio::to_string(self)?;
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in text.bytes().chain(env!("CARGO_PKG_VERSION").bytes()) {
            h ^= b as u64;
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
        Ok(format!("{h:016x}"))
    }
}

/// Checks of one task with the plot series it produced.
pub type Group = (Vec<Check>, Vec<Series>);

fn stamp(name: &str, tag: &str, f: impl FnOnce() -> Result<Group>) -> Group {
    let start = Instant::now();
    match f() {
        Ok((checks, series)) => {
            let dt = start.elapsed().as_secs_f64();
            (checks.into_iter().map(|c| Check { runtime_s: dt, ..c }).collect(), series)
        }
        Err(e) => (vec![Check::failed(name, tag, &e).timed(start)], Vec::new()),
    }
}

/// `h = λ^{-1/2}`, the Wronskian and `λ h h* = 1` on the Lebesgue string
/// with `δ = 10⁻³` and length 60.
pub fn lebesgue_krein_checks() -> Result<Vec<Check>> {
    let s = StieltjesString::uniform(1e-3, 60.0, Boundary::NeumannAtEnd)?;
    let dual = s.dual()?;
    let (mut h_dev, mut dual_dev, mut wr) = (0.0f64, 0.0f64, 0.0f64);
    for lam in [0.25, 1.0, 4.0, 25.0] {
        let h = s.krein_h(lam)?.value;
        h_dev = h_dev.max((h * lam.sqrt() - 1.0).abs());
        dual_dev = dual_dev.max((lam * h * dual.krein_h(lam)?.value - 1.0).abs());
        for frac in [0.1, 0.5, 1.0] {
            wr = wr.max(s.phi_psi(lam, frac * s.length())?.wronskian_defect());
        }
    }
    Ok(vec![
        Check::at_most("lebesgue: max |h(λ)·sqrt(λ) - 1| at λ in {0.25,1,4,25}", "identity", h_dev, 1e-3),
        Check::at_most("lebesgue: max Wronskian defect", "identity", wr, 1e-10),
        Check::at_most("lebesgue: max |λ h h* - 1|", "identity", dual_dev, 1e-8),
    ])
}

/// Reflected-motion closed forms at `t = 1`.
pub fn lebesgue_kernel_checks() -> Result<Vec<Check>> {
    let s = StieltjesString::uniform(0.01, 12.0, Boundary::NeumannAtEnd)?;
    let sig = spectral_decompose(&s, SpectralBc::NeumannAt0)?;
    let star = spectral_decompose_at(&s, SpectralBc::DirichletAt0, &[1.0])?;
    let rp = 1.0 / PI.sqrt();
    Ok(vec![
        Check::close("lebesgue: p(1;0,0) = 1/sqrt(pi)", "identity", heat_kernel(&sig, KernelMode::ReflectingP, 1.0, 0.0, 0.0)?, rp, 2e-3),
        Check::close("lebesgue: n(1) = 1/(2 sqrt(pi))", "identity", heat_kernel(&star, KernelMode::LevyN, 1.0, 0.0, 0.0)?, 0.5 * rp, 2e-3),
        Check::close(
            "lebesgue: pi(1;1) = exp(-1/4)/(2 sqrt(pi))",
            "identity",
            heat_kernel(&star, KernelMode::HittingPi, 1.0, 1.0, 0.0)?,
            (-0.25f64).exp() * 0.5 * rp,
            2e-3,
        ),
        Check::close("lebesgue: n(zeta > 1) = 1/sqrt(pi)", "identity", survival(&star, 1.0)?, rp, 2e-3),
    ])
}

/// Exit from `(-1, 1)` under Lebesgue: Kac moments at `δ = 10⁻³`, the
/// Kac–Krein bracket, and Monte Carlo on a `δ = 1/32` chain.
pub fn lebesgue_exit_checks(paths: usize, seed: u64) -> Result<Vec<Check>> {
    let fine = build_lebesgue(1.0, 1e-3)?;
    let st = kac_exit(&fine, -1.0, 1.0, 2)?;
    let coarse = build_lebesgue(1.0, 1.0 / 32.0)?;
    let chain = kac_exit(&coarse, -1.0, 1.0, 1)?;
    let h = exit_times(&coarse, -1.0, 1.0, 0.0, paths, seed)?;
    let (mc, _) = mean_se(&h);
    Ok(vec![
        Check::close("lebesgue(-1,1): E H = 1/2", "exit", st.moments[0], 0.5, 1e-3),
        Check::close("lebesgue(-1,1): E H^2 = 5/12", "exit", st.moments[1], 5.0 / 12.0, 1e-3),
        Check::holds("lebesgue(-1,1): C~ <= 1/λ_min <= 4 C~", "kac-krein", st.kac_krein_holds()),
        Check::relative(format!("lebesgue(-1,1): Monte Carlo E H over {paths} paths"), "exit", mc, chain.moments[0], 0.02),
    ])
}

/// Mean of `ν([0,1])` over independent samples, within 3 standard errors.
fn normalization(cfg: &SuiteConfig) -> Result<Group> {
    let masses: Vec<f64> = (0..cfg.measure_seeds)
        .into_par_iter()
        .map(|i| {
            let c = cfg.gmc(cfg.depth, 1.0, cfg.delta, rng::child_seed(cfg.seed, 2000 + i as u64));
            interval_mass(&sample_boundary_liouville(&c)?, 0.0, 1.0)
        })
        .collect::<Result<_>>()?;
    let (m, se) = mean_se(&masses);
    Ok((
        vec![Check::close(
            format!("E nu([0,1]) over {} samples (3 SE)", cfg.measure_seeds),
            "A2",
            m,
            1.0,
            3.0 * se + 1e-9,
        )],
        Vec::new(),
    ))
}

fn pair_anchor(cfg: &SuiteConfig, m: &AtomicMeasure, pair_seed: u64, q: f64) -> Result<f64> {
    let mut r = rng::stream(pair_seed, 9);
    let half = cfg.half_length / 2.0;
    draw_anchor(m, -half, half, q, &mut r)
}

/// Mean local exponent at Lebesgue-typical (`q = 0`) and `ν`-typical
/// (`q = 1`) points.
fn alpha_means(cfg: &SuiteConfig) -> Result<Group> {
    let per_pair: Vec<(f64, f64)> = (0..cfg.alpha_pairs)
        .into_par_iter()
        .map(|i| {
            let s = rng::child_seed(cfg.seed, 3000 + i as u64);
            let m = cfg.main_measure(s)?;
            Ok((local_alpha(&m, pair_anchor(cfg, &m, s, 0.0)?)?, local_alpha(&m, pair_anchor(cfg, &m, s, 1.0)?)?))
        })
        .collect::<Result<_>>()?;
    let (a0, _) = mean_se(&per_pair.iter().map(|p| p.0).collect::<Vec<_>>());
    let (a1, _) = mean_se(&per_pair.iter().map(|p| p.1).collect::<Vec<_>>());
    let n = cfg.alpha_pairs;
    Ok((
        vec![
            Check::close(format!("mean alpha at Lebesgue-typical points ({n} pairs)"), "A3", a0, multifractal_alpha(cfg.gamma, 0.0), 0.10),
            Check::close(format!("mean alpha at nu-typical points ({n} pairs)"), "A3", a1, multifractal_alpha(cfg.gamma, 1.0), 0.10),
        ],
        vec![Series {
            name: "alpha_pairs".into(),
            points: per_pair,
        }],
    ))
}

struct Slopes {
    alpha: f64,
    level: f64,
    via_h: f64,
    via_integral: f64,
    elshort: f64,
}

fn slopes_at(m: &AtomicMeasure, a: f64) -> Result<Slopes> {
    let w = resolution_window(m, a)?;
    let st = short_time_exponent(m, a)?;
    Ok(Slopes {
        alpha: w.alpha_hat,
        level: level_set_dimension(m, a, w.lambda_lo, w.lambda_hi)?,
        via_h: st.via_h,
        via_integral: st.via_integral,
        elshort: excursion_short_time(m, a)?,
    })
}

/// Dimension, short-time and excursion-tail slopes averaged over pairs.
pub fn dimension_checks(cfg: &SuiteConfig, q: f64) -> Result<Group> {
    let label = if q == 0.0 { "Lebesgue-typical" } else { "nu-typical" };
    let results: Vec<Result<Slopes>> = (0..cfg.dim_pairs)
        .into_par_iter()
        .map(|i| {
            let s = rng::child_seed(cfg.seed, 4000 + 1000 * q as u64 + i as u64);
            let m = cfg.main_measure(s)?;
            slopes_at(&m, pair_anchor(cfg, &m, s, q)?)
        })
        .collect();
    let ok: Vec<&Slopes> = results.iter().filter_map(|r| r.as_ref().ok()).collect();
    if ok.is_empty() {
        return Err(results.into_iter().find_map(|r| r.err()).unwrap_or_else(|| Error::degenerate("no pairs")));
    }
    let mean = |f: fn(&Slopes) -> f64| ok.iter().map(|s| f(s)).sum::<f64>() / ok.len() as f64;
    let (level, via_h, via_int, el) = (mean(|s| s.level), mean(|s| s.via_h), mean(|s| s.via_integral), mean(|s| s.elshort));
    let target = 1.0 / (1.0 + multifractal_alpha(cfg.gamma, q));
    let n = ok.len();
    let checks = vec![
        Check::close(format!("{label}: all {} pairs evaluated", cfg.dim_pairs), "level", n as f64, cfg.dim_pairs as f64, 0.0),
        Check::close(format!("{label}: mean level-set dimension over {n} pairs"), "level", level, target, 0.10),
        Check::close(format!("{label}: mean short-time exponent (integral route)"), "stb", via_int, target, 0.10),
        Check::at_most(format!("{label}: |h route - integral route| of the means"), "stb", (via_h - via_int).abs(), 0.05),
        Check::close(format!("{label}: mean excursion short-time exponent"), "elshort", el, target, 0.10),
        Check::at_most(format!("{label}: |excursion slope - h slope| of the means"), "elshort", (el - level).abs(), 0.05),
    ];
    let tag = if q == 0.0 { "q0" } else { "q1" };
    let series = vec![Series {
        name: format!("dims_{tag}"),
        points: ok.iter().map(|s| (s.alpha, s.level)).collect(),
    }];
    Ok((checks, series))
}

/// The same slopes on Lebesgue at the suite's resolution, where all of them
/// equal 1/2.
pub fn lebesgue_slope_checks(cfg: &SuiteConfig) -> Result<Group> {
    let eps = cfg.delta.unwrap_or(0.5f64.powi(cfg.depth as i32));
    let m = build_lebesgue(cfg.half_length, eps)?;
    let a = m.atoms()[m.nearest_atom(0.3)].0;
    let s = slopes_at(&m, a)?;
    Ok((
        vec![
            Check::close("lebesgue: level-set dimension", "level", s.level, 0.5, 0.02),
            Check::close("lebesgue: short-time exponent (h route)", "stb", s.via_h, 0.5, 0.03),
            Check::close("lebesgue: short-time exponent (integral route)", "stb", s.via_integral, 0.5, 0.03),
            Check::close("lebesgue: excursion short-time exponent", "elshort", s.elshort, 0.5, 0.03),
        ],
        Vec::new(),
    ))
}

/// Long-time ratios of the normalized coarse measure on the wide window.
pub fn longtime_gmc_checks(cfg: &SuiteConfig) -> Result<Group> {
    let c = cfg.gmc(cfg.longtime_depth, cfg.longtime_half_length, Some(cfg.longtime_delta), rng::child_seed(cfg.seed, 5));
    let m = sample_boundary_liouville(&c)?.normalized()?;
    let setup = LongtimeSetup::default_for(&m, 0.0, cfg.paths, rng::child_seed(cfg.seed, 6))?;
    longtime_checks("normalized_gmc", &m, 0.0, &setup)
}

pub fn identity_group(cfg: &SuiteConfig) -> Result<Group> {
    let m = cfg.sim_measure()?;
    let budget = IdentityBudget {
        exit_paths: cfg.paths,
        seed: rng::child_seed(cfg.seed, 8),
    };
    Ok((identity_suite("gmc", &m, 0.0, budget)?, Vec::new()))
}

pub fn random_string_checks(cfg: &SuiteConfig) -> Result<Group> {
    let s = rng::child_seed(cfg.seed, 10);
    let (entrance, ck) = random_string_kernels(20, 20, s)?;
    let frac = reconstruction_in_bracket(100, 50, s)?;
    Ok((
        vec![
            Check::at_most("random strings: entrance law max deviation", "identity", entrance, 1e-6),
            Check::at_most("random strings: Chapman-Kolmogorov max deviation", "identity", ck, 1e-6),
            Check::close("random strings: reconstructed h inside the bracket", "identity", frac, 1.0, 0.0),
        ],
        Vec::new(),
    ))
}

/// Simulator agreement, excursion rates, time reversal and the inverse
/// local time on `m`, anchored at the atom nearest 0.
pub fn simulation_checks(label: &str, m: &AtomicMeasure, paths: usize, seed: u64) -> Result<Group> {
    let mut checks = oracle_checks(m, label, &[0.25, 1.0], paths, rng::child_seed(seed, 0))?;
    let a = m.atoms()[m.nearest_atom(0.0)].0;
    let set = harvest(m, a, 1000.0, 8, rng::child_seed(seed, 1))?;
    let rates = excursion_rates(&set, m, 0.05, 0.5);
    let worst = rates
        .iter()
        .flat_map(|r| [r.1, r.2])
        .map(|v| (v - 1.0).abs())
        .fold(0.0, f64::max);
    checks.push(Check::at_most(format!("{label}: max |x·n(M >= x) - 1| over x in [0.05, 0.5]"), "excursion", worst, 0.10));
    let (ks, _) = time_reversal_ks(&set, 0.1)?;
    checks.push(Check::at_most(format!("{label}: time-reversal KS of argmax fractions"), "excursion", ks, 0.05));
    let strings = reflecting_strings(m, a)?;
    let delta = two_sided_h(&strings.0, &strings.1, 1.0)? * 2f64.ln();
    let inc = inverse_local_time_increments(m, a, delta, 500, 8, rng::child_seed(seed, 2))?;
    for lam in [1.0, 4.0] {
        let (est, _, exact) = inverse_local_time_laplace(&inc, lam, delta, &strings)?;
        checks.push(Check::relative(format!("{label}: E exp(-λ l(Δ)) at λ={lam}"), "ilt", est, exact, 0.05));
    }
    let series = vec![Series {
        name: format!("{label}.excursion_rate"),
        points: rates.iter().map(|r| (r.0, 0.5 * (r.1 + r.2))).collect(),
    }];
    Ok((checks, series))
}

/// [`simulation_checks`] on Lebesgue or on the coarse sampled measure.
pub fn simulation_group(cfg: &SuiteConfig, gmc: bool) -> Result<Group> {
    if gmc {
        simulation_checks("gmc", &cfg.sim_measure()?, cfg.paths, rng::child_seed(cfg.seed, 12))
    } else {
        let eps = 0.5f64.powi(cfg.sim_depth as i32);
        simulation_checks("lebesgue", &build_lebesgue(cfg.sim_half_length, eps)?, cfg.paths, rng::child_seed(cfg.seed, 11))
    }
}

type Task<'a> = Box<dyn Fn() -> Result<Group> + Send + Sync + 'a>;

/// Runs every check group. Failures, including errors, are recorded as
/// checks; only an invalid configuration is an error.
pub fn run_theorem_suite(cfg: &SuiteConfig) -> Result<Report> {
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads.unwrap_or(0))
        .build()
        .map_err(|e| Error::invalid(format!("thread pool: {e}")))?;
    let paths = cfg.paths;
    let seed = cfg.seed;
    let groups: Vec<(&str, &str, Task<'_>)> = vec![
        ("krein closed forms", "identity", Box::new(|| Ok((lebesgue_krein_checks()?, Vec::new())))),
        ("heat kernel closed forms", "identity", Box::new(|| Ok((lebesgue_kernel_checks()?, Vec::new())))),
        (
            "lebesgue exit",
            "exit",
            Box::new(move || Ok((lebesgue_exit_checks(10 * paths, rng::child_seed(seed, 13))?, Vec::new()))),
        ),
        ("normalization", "A2", Box::new(|| normalization(cfg))),
        ("local exponents", "A3", Box::new(|| alpha_means(cfg))),
        ("lebesgue slopes", "level", Box::new(|| lebesgue_slope_checks(cfg))),
        ("dimensions q=1", "level", Box::new(|| dimension_checks(cfg, 1.0))),
        ("dimensions q=0", "level", Box::new(|| dimension_checks(cfg, 0.0))),
        ("long-time ratios", "ltt", Box::new(|| longtime_gmc_checks(cfg))),
        ("identity suite", "identity", Box::new(|| identity_group(cfg))),
        ("random strings", "identity", Box::new(|| random_string_checks(cfg))),
        ("lebesgue simulation", "timechange", Box::new(|| simulation_group(cfg, false))),
        ("gmc simulation", "timechange", Box::new(|| simulation_group(cfg, true))),
    ];
    let results: Vec<Group> = pool.install(|| groups.par_iter().map(|(name, tag, f)| stamp(name, tag, f)).collect());
    let mut report = Report {
        config: serde_json::to_value(cfg).map_err(|e| Error::invalid(e.to_string()))?,
        fingerprint: cfg.fingerprint()?,
        ..Default::default()
    };
    for (checks, series) in results {
        report.checks.extend(checks);
        report.series.extend(series);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_forms_pass() {
        for c in lebesgue_krein_checks().unwrap().into_iter().chain(lebesgue_kernel_checks().unwrap()) {
            assert!(c.pass, "{c:?}");
        }
    }

    #[test]
    fn fingerprint_ignores_threads() {
        let a = SuiteConfig::default();
        let b = SuiteConfig {
            threads: Some(3),
            ..a.clone()
        };
        assert_eq!(a.fingerprint().unwrap(), b.fingerprint().unwrap());
        let c = SuiteConfig { seed: 2, ..a.clone() };
        assert_ne!(a.fingerprint().unwrap(), c.fingerprint().unwrap());
    }

    #[test]
    fn bad_config_is_an_error() {
        let c = SuiteConfig {
            gamma: 2.0,
            ..Default::default()
        };
        assert!(run_theorem_suite(&c).is_err());
    }
}
