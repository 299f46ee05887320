//! Command-line front end.
//!
//! Exit codes: 0 on success, 1 when `verify` records failing checks, 2 on
//! usage or input errors.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::diffusion::{extract_excursions, simulate_gap_diffusion, write_excursions_csv, write_path_csv};
use crate::error::{Error, Result};
use crate::experiments::{run_theorem_suite, SuiteConfig};
use crate::krein::{spectral_decompose, to_string, Boundary, Direction, SpectralBc, StieltjesString};
use crate::measures::{sample_boundary_liouville, AtomicMeasure, GmcConfig, Kernel};

#[derive(Debug, Parser)]
#[command(name = "liouville", version, about = "Krein-string laboratory for Liouville Brownian motion")]
struct Cli {
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Sample a boundary Liouville measure and write it as JSON.
    SampleMeasure {
        #[command(flatten)]
        gmc: GmcArgs,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Krein correspondence of the string at an anchor.
    Krein {
        #[arg(long)]
        measure: PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        anchor: f64,
        #[arg(long)]
        lambda: f64,
        #[arg(long, value_enum, default_value_t = Side::Plus)]
        side: Side,
        /// Also write the Neumann-at-0 spectral decomposition here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Simulate the gap diffusion and write its event path as CSV.
    Simulate {
        #[arg(long)]
        measure: PathBuf,
        /// Start point (snapped to the nearest atom).
        #[arg(long, allow_hyphen_values = true)]
        anchor: f64,
        #[arg(long)]
        time: f64,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Simulate from an atom and write the excursions away from it as CSV.
    Excursions {
        #[arg(long)]
        measure: PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        anchor: f64,
        #[arg(long)]
        time: f64,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the verification suite; exit 1 if any check fails.
    Verify {
        #[command(flatten)]
        gmc: GmcArgs,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        paths: Option<usize>,
        #[arg(long)]
        measure_seeds: Option<usize>,
        #[arg(long)]
        alpha_pairs: Option<usize>,
        #[arg(long)]
        dim_pairs: Option<usize>,
    },
}

#[derive(Debug, Args)]
struct GmcArgs {
    #[arg(long, default_value_t = 1.0)]
    gamma: f64,
    #[arg(long, default_value_t = 10)]
    depth: u32,
    #[arg(long = "L", default_value_t = 4.0)]
    half_length: f64,
    /// Grid spacing (default: the cutoff 2^-depth).
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long, default_value = "truncated-log-exact-pd")]
    kernel: Kernel,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Side {
    Plus,
    Minus,
}

enum Failure {
    Usage(String),
    Checks,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Usage(format!("error: {e}"))
    }
}

/// Parses `argv` (including the program name), runs the command and
/// returns the process exit code.
pub fn run(argv: Vec<String>) -> i32 {
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let threads = cli.threads;
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(threads.unwrap_or(0)).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: thread pool: {e}");
            return 2;
        }
    };
    match pool.install(|| execute(cli.command, threads)) {
        Ok(()) => 0,
        Err(Failure::Checks) => 1,
        Err(Failure::Usage(msg)) => {
            eprintln!("{msg}");
            2
        }
    }
}

fn load_measure(path: &Path) -> Result<AtomicMeasure> {
    AtomicMeasure::from_json(&std::fs::read_to_string(path)?)
}

/// The string at `anchor` running to the window edge, reflected there.
pub fn side_string(measure: &AtomicMeasure, anchor: f64, minus: bool) -> Result<StieltjesString> {
    let (lo, hi) = measure.window();
    if minus {
        to_string(measure, anchor, Direction::Minus, anchor - lo, Boundary::NeumannAtEnd)
    } else {
        to_string(measure, anchor, Direction::Plus, hi - anchor, Boundary::NeumannAtEnd)
    }
}

fn gmc_config(g: &GmcArgs, seed: u64) -> GmcConfig {
    let mut c = GmcConfig::new(g.gamma, g.depth, g.half_length, seed);
    c.kernel = g.kernel;
    if let Some(d) = g.delta {
        c.grid_spacing = d;
    }
    c
}

fn execute(cmd: Command, threads: Option<usize>) -> std::result::Result<(), Failure> {
    match cmd {
        Command::SampleMeasure { gmc, seed, out } => {
            let m = sample_boundary_liouville(&gmc_config(&gmc, seed))?;
            std::fs::write(&out, m.to_json()?).map_err(Error::from)?;
        }
        Command::Krein {
            measure,
            anchor,
            lambda,
            side,
            out,
        } => {
            let m = load_measure(&measure)?;
            let s = side_string(&m, anchor, matches!(side, Side::Minus))?;
            let v = s.krein_h(lambda)?;
            println!("h_dirichlet\t{}", v.dirichlet);
            match v.neumann {
                Some(n) => println!("h_neumann\t{n}"),
                None => println!("h_neumann\tinf"),
            }
            println!("bracket\t{}", v.bracket());
            if let Some(out) = out {
                let spec = spectral_decompose(&s, SpectralBc::NeumannAt0)?;
                std::fs::write(&out, spec.to_json()?).map_err(Error::from)?;
            }
        }
        Command::Simulate {
            measure,
            anchor,
            time,
            seed,
            out,
        } => {
            let m = load_measure(&measure)?;
            let path = simulate_gap_diffusion(&m, anchor, time, seed)?;
            write_path_csv(&path, BufWriter::new(File::create(&out).map_err(Error::from)?))?;
        }
        Command::Excursions {
            measure,
            anchor,
            time,
            seed,
            out,
        } => {
            let m = load_measure(&measure)?;
            let a = m.atoms()[m.nearest_atom(anchor)].0;
            let path = simulate_gap_diffusion(&m, a, time, seed)?;
            let set = extract_excursions(&path, a)?;
            write_excursions_csv(&set, BufWriter::new(File::create(&out).map_err(Error::from)?))?;
        }
        Command::Verify {
            gmc,
            seed,
            out,
            paths,
            measure_seeds,
            alpha_pairs,
            dim_pairs,
        } => {
            let d = SuiteConfig::default();
            let cfg = SuiteConfig {
                gamma: gmc.gamma,
                depth: gmc.depth,
                half_length: gmc.half_length,
                delta: gmc.delta,
                kernel: gmc.kernel,
                seed,
                paths: paths.unwrap_or(d.paths),
                measure_seeds: measure_seeds.unwrap_or(d.measure_seeds),
                alpha_pairs: alpha_pairs.unwrap_or(d.alpha_pairs),
                dim_pairs: dim_pairs.unwrap_or(d.dim_pairs),
                threads,
                ..d
            };
            let report = run_theorem_suite(&cfg)?;
            report.write(&out)?;
            let failed = report.checks.iter().filter(|c| !c.pass).count();
            for c in &report.checks {
                println!("{}\t{}\t{}", if c.pass { "PASS" } else { "FAIL" }, c.tag, c.name);
            }
            println!("{} checks, {failed} failed", report.checks.len());
            if failed > 0 {
                return Err(Failure::Checks);
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn argv(s: &str) -> Vec<String> {
        std::iter::once("liouville").chain(s.split_whitespace()).map(String::from).collect()
    }

    #[test]
    fn usage_errors_exit_2() {
        assert_eq!(run(argv("sample-measure --gamma 1 --out x.json")), 2);
        assert_eq!(run(argv("verify --bogus 1")), 2);
        assert_eq!(run(argv("frobnicate")), 2);
        assert_eq!(run(argv("--help")), 0);
    }

    #[test]
    fn negative_anchor_parses() {
        let c = Cli::try_parse_from(argv("krein --measure m.json --anchor -0.5 --lambda 1")).unwrap();
        assert!(matches!(c.command, Command::Krein { anchor, .. } if anchor == -0.5));
    }
}
