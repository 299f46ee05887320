//! The eleven acceptance criteria, one PASS/FAIL line each.
//!
//! Run with `cargo test --release --test acceptance -- --nocapture` to see
//! the lines when everything passes.

use std::process::Command;
use std::time::Instant;

use liouville::experiments::identities::{convolution_identity, random_sandwiches, random_string_kernels, reconstruction_in_bracket};
use liouville::experiments::simulation::reflecting_strings;
use liouville::experiments::suite::{
    dimension_checks, lebesgue_exit_checks, lebesgue_kernel_checks, lebesgue_krein_checks, lebesgue_slope_checks,
    longtime_gmc_checks, simulation_checks,
};
use liouville::experiments::{longtime_checks, Check, LongtimeSetup, SuiteConfig};
use liouville::krein::{hv_sandwich, kac_exit};
use liouville::measures::{build_lebesgue, sample_boundary_liouville, AtomicMeasure, GmcConfig};
use liouville::Result;

const SEED: u64 = 1;

struct Outcome {
    id: usize,
    pass: bool,
    line: String,
}

fn run(id: usize, title: &str, limit_s: f64, f: impl FnOnce() -> Result<(bool, String)>) -> Outcome {
    let start = Instant::now();
    let (ok, detail) = f().unwrap_or_else(|e| (false, format!("error: {e}")));
    let secs = start.elapsed().as_secs_f64();
    let pass = ok && secs < limit_s;
    let line = format!(
        "{} {id:>2} {title}: {detail} [{secs:.1} s, limit {limit_s} s]",
        if pass { "PASS" } else { "FAIL" }
    );
    println!("{line}");
    Outcome { id, pass, line }
}

/// All checks pass; the detail lists the failing ones.
fn verdict(checks: &[Check]) -> (bool, String) {
    let bad: Vec<String> = checks
        .iter()
        .filter(|c| !c.pass)
        .map(|c| format!("{} = {:.4} (target {:.4}, tol {})", c.name, c.estimate, c.target, c.tol))
        .collect();
    if bad.is_empty() {
        (true, format!("{} checks", checks.len()))
    } else {
        (false, bad.join("; "))
    }
}

fn sim_measure() -> Result<AtomicMeasure> {
    let cfg = SuiteConfig::default();
    sample_boundary_liouville(&GmcConfig::new(1.0, cfg.sim_depth, cfg.sim_half_length, liouville::rng::child_seed(SEED, 7)))
}

fn hv_holds(m: &AtomicMeasure, r_lo: f64, r_hi: f64) -> Result<bool> {
    let a = m.atoms()[m.nearest_atom(0.0)].0;
    let (p, q) = reflecting_strings(m, a)?;
    Ok(hv_sandwich(&p, &q, r_lo, r_hi, 20)?.iter().all(|p| p.holds))
}

fn strip_runtimes(v: &mut serde_json::Value) {
    if let Some(checks) = v.get_mut("checks").and_then(|c| c.as_array_mut()) {
        for c in checks {
            c.as_object_mut().unwrap().remove("runtime_s");
        }
    }
}

fn criterion_11() -> Result<(bool, String)> {
    let dir = tempfile::tempdir()?;
    let mut outs = Vec::new();
    for (run, threads) in [("a", "1"), ("b", "2")] {
        let out = dir.path().join(format!("{run}.json"));
        let status = Command::new(env!("CARGO_BIN_EXE_liouville"))
            .args(["verify", "--gamma", "1", "--seed", "5", "--depth", "8", "--paths", "2000"])
            .args(["--measure-seeds", "20", "--alpha-pairs", "4", "--dim-pairs", "2", "--threads", threads])
            .arg("--out")
            .arg(&out)
            .output()?;
        let code = status.status.code().unwrap_or(-1);
        if code != 0 && code != 1 {
            return Ok((false, format!("verify exited with {code}: {}", String::from_utf8_lossy(&status.stderr))));
        }
        let mut v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out)?).unwrap();
        strip_runtimes(&mut v);
        let tsvs: Vec<String> = {
            let mut names: Vec<_> = std::fs::read_dir(dir.path())?
                .filter_map(|e| e.ok())
                .map(|e| e.file_name().to_string_lossy().into_owned())
                .filter(|n| n.starts_with(&format!("{run}.")) && n.ends_with(".tsv"))
                .collect();
            names.sort();
            names.iter().map(|n| std::fs::read_to_string(dir.path().join(n)).unwrap()).collect()
        };
        outs.push((v, tsvs));
    }
    let same = outs[0] == outs[1];
    let n = outs[0].0["checks"].as_array().map_or(0, |c| c.len());
    Ok((same && !outs[0].1.is_empty(), format!("{n} checks and {} TSV files identical across --threads 1/2: {same}", outs[0].1.len())))
}

#[test]
fn acceptance() {
    let cfg = SuiteConfig::default();
    let mut out = Vec::new();
    println!();

    out.push(run(1, "closed-form Krein suite", 10.0, || Ok(verdict(&lebesgue_krein_checks()?))));

    out.push(run(2, "spectral reconstruction in bracket", 30.0, || {
        let f = reconstruction_in_bracket(100, 50, SEED)?;
        Ok((f == 1.0, format!("fraction inside = {f}")))
    }));

    out.push(run(3, "heat-kernel oracles", 10.0, || Ok(verdict(&lebesgue_kernel_checks()?))));

    out.push(run(4, "identities", 60.0, || {
        let leb = build_lebesgue(8.0, 1.0 / 64.0)?;
        let a = leb.atoms()[leb.nearest_atom(0.0)].0;
        let conv = convolution_identity(&leb, a, &[0.5, 1.0, 2.0])?;
        let g = sim_measure()?;
        let conv_gmc = convolution_identity(&g, g.atoms()[g.nearest_atom(0.0)].0, &[0.5, 1.0, 2.0])?;
        let (ent, ck) = random_string_kernels(20, 20, SEED)?;
        let ok = conv <= 1e-3 && conv_gmc <= 1e-3 && ent <= 1e-6 && ck <= 1e-6;
        Ok((ok, format!("convolution {conv:.1e} (lebesgue), {conv_gmc:.1e} (gmc); entrance {ent:.1e}; CK {ck:.1e}")))
    }));

    out.push(run(5, "sandwiches", 30.0, || {
        let leb_hv = hv_holds(&build_lebesgue(2.0, 1.0 / 256.0)?, 0.01, 1.0)?;
        let gmc_hv = hv_holds(&sim_measure()?, 0.25, 1.0)?;
        let (rand_hv, kk) = random_sandwiches(20, 20, SEED)?;
        let st = kac_exit(&build_lebesgue(1.0, 1e-3)?, -1.0, 1.0, 1)?;
        let leb_kk = st.kac_krein_holds();
        let ok = leb_hv && gmc_hv && rand_hv && leb_kk && kk == 20;
        Ok((
            ok,
            format!(
                "hv lebesgue/gmc/random: {leb_hv}/{gmc_hv}/{rand_hv}; Kac-Krein lebesgue {:.4} <= {:.4} <= {:.4}: {leb_kk}; random strings {kk}/20",
                st.c_tilde,
                1.0 / st.lambda_min,
                4.0 * st.c_tilde
            ),
        ))
    }));

    out.push(run(6, "Kac moments and Monte Carlo exit", 60.0, || Ok(verdict(&lebesgue_exit_checks(100_000, SEED)?))));

    // 7 and 8 share the simulation runs
    let sims = [
        ("lebesgue", build_lebesgue(cfg.sim_half_length, 0.5f64.powi(cfg.sim_depth as i32))),
        ("gmc", sim_measure()),
    ];
    let start = Instant::now();
    let mut sim_checks = Vec::new();
    let mut sim_err = None;
    for (i, (label, m)) in sims.into_iter().enumerate() {
        match m.and_then(|m| simulation_checks(label, &m, 10_000, liouville::rng::child_seed(SEED, 20 + i as u64))) {
            Ok((c, _)) => sim_checks.extend(c),
            Err(e) => sim_err = Some(e),
        }
    }
    let sim_secs = start.elapsed().as_secs_f64();
    let (oracle, laws): (Vec<Check>, Vec<Check>) = sim_checks.into_iter().partition(|c| c.tag == "timechange");
    // each criterion is charged the full shared simulation time
    let sim_verdict = |c: &[Check]| {
        let (ok, detail) = match &sim_err {
            Some(e) => (false, format!("error: {e}")),
            None => verdict(c),
        };
        Ok((ok && sim_secs < 300.0, format!("{detail}; simulations took {sim_secs:.1} s")))
    };
    out.push(run(7, "gap diffusion vs time-change oracle", 300.0, || sim_verdict(&oracle)));
    out.push(run(8, "excursion laws", 300.0, || sim_verdict(&laws)));

    out.push(run(9, "dimension and exponent targets", 900.0, || {
        let mut checks = lebesgue_slope_checks(&cfg)?.0;
        checks.extend(dimension_checks(&cfg, 1.0)?.0);
        checks.extend(dimension_checks(&cfg, 0.0)?.0);
        Ok(verdict(&checks))
    }));

    out.push(run(10, "long-time ratios", 900.0, || {
        let four = build_lebesgue(32.0, 0.25)?.scaled(4.0)?;
        let setup = LongtimeSetup::default_for(&four, 0.0, 10_000, SEED)?;
        // the three stated targets; the exact-scaling companions are extra
        let (a, _) = longtime_checks("4*lebesgue", &four, 0.0, &setup)?;
        let (b, _) = longtime_gmc_checks(&cfg)?;
        let pick = |c: Vec<Check>| c.into_iter().take(3).collect::<Vec<_>>();
        let mut checks = pick(a);
        checks.extend(pick(b));
        Ok(verdict(&checks))
    }));

    out.push(run(11, "determinism of verify", 600.0, criterion_11));

    let failed: Vec<&Outcome> = out.iter().filter(|o| !o.pass).collect();
    println!("{}/{} criteria pass", out.len() - failed.len(), out.len());
    assert!(
        failed.is_empty(),
        "failing criteria:\n{}",
        failed.iter().map(|o| format!("{}: {}", o.id, o.line)).collect::<Vec<_>>().join("\n")
    );
}
