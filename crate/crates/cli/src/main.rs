//! `semialg` — bounds on Gaussian/exponential measures of semi-algebraic
//! sets.
//!
//! Subcommands: `bounds` (run the hierarchy, emit CSV + JSON),
//! `export-sdpa` (write a level instance in SDPA sparse format), `mc`
//! (Monte Carlo estimate), `moments` (closed-form moment table) and
//! `stokes-check` (quadrature verification that the Stokes identities hold
//! on the set). Log verbosity comes from the `SEMIALG_LOG` env var.

mod problem;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use semialg_core::hierarchy::{self, Scheme};
use semialg_core::moments::MomentOracle;
use semialg_core::oracle;
use semialg_core::poly::enumerate_multiindices;
use semialg_core::relax::{
    build_scheme1, build_scheme3, default_stokes_multiplier, ensure_support, stokes_polys,
};
use semialg_core::sdp::{export_sdpa, EqualityEncoding};
use semialg_core::Poly;

use problem::{parse_problem, Problem};

#[derive(Parser)]
#[command(name = "semialg", version, about = "Bounds on Gaussian and exponential measures of basic semi-algebraic sets via semidefinite hierarchies")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, Debug, Default, ValueEnum)]
enum EncodingArg {
    /// Equalities as paired opposing 1x1 diagonal entries.
    #[default]
    Paired,
    /// Equalities eliminated by nullspace substitution before export.
    Eliminated,
}

impl From<EncodingArg> for EqualityEncoding {
    fn from(e: EncodingArg) -> Self {
        match e {
            EncodingArg::Paired => EqualityEncoding::PairedDiagonal,
            EncodingArg::Eliminated => EqualityEncoding::Eliminated,
        }
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the hierarchy over d_min..=d_max and write results
    Bounds {
        problem: PathBuf,
        /// Output prefix: writes <out>.csv and <out>.json
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        d_min: Option<u32>,
        #[arg(long)]
        d_max: Option<u32>,
        /// Use the plain scheme-1 hierarchy instead of the Stokes-accelerated one
        #[arg(long)]
        scheme1: bool,
        /// Skip the complement-decomposition lower bounds
        #[arg(long)]
        no_lower: bool,
        /// Override both solver tolerances (gap and feasibility)
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Write the level-d SDP instance in SDPA sparse format
    ExportSdpa {
        problem: PathBuf,
        #[arg(long)]
        d: u32,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t)]
        encoding: EncodingArg,
    },
    /// Monte Carlo estimate of the measure of the set
    Mc {
        problem: PathBuf,
        #[arg(long, default_value_t = 10_000_000)]
        samples: u64,
        #[arg(long, default_value_t = 20240801)]
        seed: u64,
    },
    /// Closed-form moments of the reference measure up to degree d (CSV)
    Moments {
        problem: PathBuf,
        #[arg(long)]
        d: u32,
    },
    /// Verify the Stokes identities against quadrature moments of the set
    StokesCheck {
        problem: PathBuf,
        #[arg(long)]
        d: u32,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter("SEMIALG_LOG")).init();
    let cli = Cli::parse();
    match dispatch(cli.cmd) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(1)
        }
    }
}

fn load(path: &Path) -> Result<Problem> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading problem file {}", path.display()))?;
    parse_problem(&text)
}

fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, contents).with_context(|| format!("writing {}", tmp.display()))?;
    fs::rename(&tmp, path).with_context(|| format!("renaming into {}", path.display()))?;
    Ok(())
}

fn dispatch(cmd: Cmd) -> Result<ExitCode> {
    match cmd {
        Cmd::Bounds {
            problem,
            out,
            d_min,
            d_max,
            scheme1,
            no_lower,
            tol,
        } => {
            let mut p = load(&problem)?;
            if let Some(d) = d_min {
                p.config.d_min = d;
            }
            if let Some(d) = d_max {
                p.config.d_max = d;
            }
            if scheme1 {
                p.config.scheme = Scheme::Scheme1;
            }
            if no_lower {
                p.config.compute_lower = false;
            }
            if let Some(t) = tol {
                p.config.solver.tol_gap = t;
                p.config.solver.tol_feas = t;
            }
            p.config.cells = p.cells.clone();

            let oracle = MomentOracle::new(p.spec);
            let result = hierarchy::run(&p.set, &oracle, &p.config)?;

            let csv_path = out.with_extension("csv");
            let json_path = out.with_extension("json");
            write_atomic(&csv_path, &result.to_csv())?;
            write_atomic(&json_path, &result.to_json())?;

            let (lo, hi) = result.final_bracket();
            println!(
                "levels {}..={}: bracket [{}, {}] written to {} and {}",
                p.config.d_min,
                p.config.d_max,
                lo.map(|v| v.to_string()).unwrap_or_else(|| "-".into()),
                hi.map(|v| v.to_string()).unwrap_or_else(|| "-".into()),
                csv_path.display(),
                json_path.display(),
            );
            for w in &result.warnings {
                eprintln!("warning: {w}");
            }
            let usable = result.levels.iter().all(|l| {
                l.status_upper.is_usable_bound()
                    && l.status_lower.is_none_or(|s| s.is_usable_bound())
            });
            if !usable {
                Ok(ExitCode::from(1))
            } else if result.any_inaccurate() {
                Ok(ExitCode::from(2))
            } else {
                Ok(ExitCode::SUCCESS)
            }
        }
        Cmd::ExportSdpa {
            problem,
            d,
            out,
            encoding,
        } => {
            let p = load(&problem)?;
            let oracle = MomentOracle::new(p.spec);
            let set = ensure_support(&p.set, &p.spec)?;
            let instance = match p.config.scheme {
                Scheme::Scheme1 => {
                    let one = Poly::one(set.dim());
                    let f = p.config.objective_f.as_ref().unwrap_or(&one);
                    build_scheme1(&set, &oracle, d, f)?
                }
                Scheme::Scheme3 => {
                    let f = match &p.config.f_stokes {
                        Some(f) => f.clone(),
                        None => default_stokes_multiplier(&set)?,
                    };
                    build_scheme3(&set, &oracle, d, &f)?
                }
            };
            let text = export_sdpa(&instance, encoding.into())?;
            write_atomic(&out, &text)?;
            println!(
                "wrote level-{d} instance ({} vars, {} blocks, {} equalities) to {}",
                instance.num_vars(),
                instance.blocks().len(),
                instance.num_equalities(),
                out.display()
            );
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Mc {
            problem,
            samples,
            seed,
        } => {
            let p = load(&problem)?;
            let est = oracle::mc_measure(&p.set, &p.spec, samples, seed);
            println!("{}", serde_json::to_string_pretty(&est)?);
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Moments { problem, d } => {
            let p = load(&problem)?;
            let oracle = MomentOracle::new(p.spec);
            let alphas = enumerate_multiindices(p.spec.n, d);
            println!("alpha,value");
            for (alpha, value) in alphas.iter().zip(oracle.moment_vector(d)) {
                let a = alpha
                    .exponents()
                    .iter()
                    .map(u32::to_string)
                    .collect::<Vec<_>>()
                    .join(" ");
                println!("{a},{value}");
            }
            Ok(ExitCode::SUCCESS)
        }
        Cmd::StokesCheck { problem, d } => {
            let p = load(&problem)?;
            let moments = oracle::restricted_moments_quadrature(&p.set, &p.spec, d)?;
            let alphas = enumerate_multiindices(p.spec.n, 2 * d);
            let supported = ensure_support(&p.set, &p.spec)?;
            let f = match &p.config.f_stokes {
                Some(f) => f.clone(),
                None => default_stokes_multiplier(&supported)?,
            };
            let list = stokes_polys(&f, &p.spec, d);
            let mut worst: f64 = 0.0;
            for sp in &list {
                let mut l = 0.0;
                for (alpha, coeff) in sp.p.terms() {
                    let k = alphas
                        .iter()
                        .position(|a| a == alpha)
                        .expect("stokes polynomial within degree budget");
                    l += coeff * moments[k];
                }
                worst = worst.max(l.abs());
            }
            println!(
                "max |L(p_i_alpha)| over {} stokes rows at d = {d}: {worst:.3e}",
                list.len()
            );
            if worst <= 1e-8 {
                Ok(ExitCode::SUCCESS)
            } else {
                Ok(ExitCode::from(1))
            }
        }
    }
}
