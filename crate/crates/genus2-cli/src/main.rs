//! Command-line front end: point evaluation, verification suites, parameter
//! sweeps, and machine-readable reports.
//!
//! Reports are JSON on stdout (or `--output`); sweeps additionally write a
//! CSV table. Exit status: 0 on success, 1 on domain or input errors, 2 when
//! a verification suite fails.

mod args;

use args::{format_complex, resolve_complex, resolve_k, resolve_usize, ConfigFile};
use clap::{Parser, Subcommand, ValueEnum};
use genus2::elliptic::eta_numeric;
use genus2::fock;
use genus2::json::complex_json;
use genus2::lattice::{siegel_theta, z2_lattice, EvenLattice};
use genus2::modular::{ratio_residual, ratio_t, two_tori_coordinates_from_omega};
use genus2::necklace::NecklaceExpansionConfig;
use genus2::partition::{z2_heisenberg, z2_product_formula, ZFormula};
use genus2::sewing::SewnSurface;
use genus2::verify;
use genus2::{Error, Result};
use num::complex::Complex64;
use serde::{Deserialize, Serialize};
use serde_json::json;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "genus2", version, about = "Genus-two torus-self-sewing calculator")]
struct Cli {
    /// key = value config file supplying defaults for point parameters
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// write the JSON report to this path instead of stdout
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    /// numeric point evaluation or exact series arithmetic
    #[arg(long, global = true, value_enum, default_value_t = Mode::Numeric)]
    mode: Mode,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    Numeric,
    Exact,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FormulaArg {
    Determinant,
    Product,
    OracleSeries,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SweepMode {
    /// rho moves around a circle of fixed modulus; flags branch jumps
    RhoRay,
    /// w is halved repeatedly at fixed chi; reports comparison residuals
    WHalving,
}

#[derive(Subcommand)]
enum Command {
    /// Period matrix and diagnostics at a sewing point
    Omega {
        #[arg(long)]
        tau: Option<String>,
        #[arg(long)]
        w: Option<String>,
        #[arg(long)]
        rho: Option<String>,
        #[arg(long, short = 'K')]
        k: Option<usize>,
    },
    /// Genus-two free-boson partition function
    Z2 {
        #[arg(long)]
        tau: Option<String>,
        #[arg(long)]
        w: Option<String>,
        #[arg(long)]
        rho: Option<String>,
        #[arg(long, short = 'K')]
        k: Option<usize>,
        #[arg(long, default_value_t = 1)]
        rank: u32,
        #[arg(long, value_enum, default_value_t = FormulaArg::Determinant)]
        formula: FormulaArg,
    },
    /// Siegel theta function of a lattice at the period matrix of a point
    Theta {
        #[arg(long)]
        tau: Option<String>,
        #[arg(long)]
        w: Option<String>,
        #[arg(long)]
        rho: Option<String>,
        #[arg(long, short = 'K')]
        k: Option<usize>,
        /// builtin name (a1, a1a1, 2i2) or a JSON file path
        #[arg(long, default_value = "a1")]
        lattice: String,
        #[arg(long)]
        cutoff: Option<usize>,
    },
    /// Lattice partition function Z_{M^l} theta_L(Omega)
    Zlattice {
        #[arg(long)]
        tau: Option<String>,
        #[arg(long)]
        w: Option<String>,
        #[arg(long)]
        rho: Option<String>,
        #[arg(long, short = 'K')]
        k: Option<usize>,
        #[arg(long, default_value = "a1")]
        lattice: String,
        #[arg(long)]
        cutoff: Option<usize>,
    },
    /// Run verification suites and print one pass/fail line per check
    Verify {
        /// `all` or one of the suite names
        #[arg(long, default_value = "all")]
        suite: String,
    },
    /// Parameter sweep with CSV output
    Sweep {
        #[arg(long, value_enum)]
        sweep: SweepMode,
        #[arg(long)]
        tau: Option<String>,
        #[arg(long)]
        w: Option<String>,
        #[arg(long)]
        rho: Option<String>,
        #[arg(long)]
        chi: Option<String>,
        #[arg(long, short = 'K')]
        k: Option<usize>,
        /// number of sweep points (0 gives a header-only CSV)
        #[arg(long)]
        steps: Option<usize>,
        /// CSV output path
        #[arg(long)]
        csv: PathBuf,
    },
    /// Compare the self-sewing and two-tori partition functions
    Compare {
        #[arg(long)]
        tau: Option<String>,
        #[arg(long)]
        w: Option<String>,
        #[arg(long)]
        chi: Option<String>,
        #[arg(long, short = 'K')]
        k: Option<usize>,
    },
}

/// The fully-resolved run parameters; serializes losslessly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub command: String,
    pub mode: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub w: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rho: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub chi: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rank: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub formula: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lattice: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cutoff: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub suite: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
}

impl RunConfig {
    fn bare(command: &str, mode: Mode) -> Self {
        RunConfig {
            command: command.into(),
            mode: match mode {
                Mode::Numeric => "numeric".into(),
                Mode::Exact => "exact".into(),
            },
            tau: None,
            w: None,
            rho: None,
            chi: None,
            k: None,
            rank: None,
            formula: None,
            lattice: None,
            cutoff: None,
            suite: None,
            sweep: None,
            steps: None,
        }
    }
}

fn load_lattice(spec: &str) -> Result<EvenLattice> {
    match spec {
        "a1" | "a1a1" | "2i2" => EvenLattice::builtin(spec),
        path => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::InvalidInput(format!("lattice file {}: {}", path, e)))?;
            EvenLattice::from_json(&text)
        }
    }
}

fn timestamp() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

fn reject_exact(mode: Mode) -> Result<()> {
    if mode == Mode::Exact {
        return Err(Error::InvalidInput(
            "exact mode is restricted to series expansions; point evaluation is numeric \
             (the exact-identities verify suite carries the exact-rational data)"
                .into(),
        ));
    }
    Ok(())
}

fn emit(output: &Option<PathBuf>, report: &serde_json::Value) -> Result<()> {
    let text = serde_json::to_string_pretty(report)
        .map_err(|e| Error::InvalidInput(e.to_string()))?;
    match output {
        Some(path) => std::fs::write(path, text + "\n")
            .map_err(|e| Error::InvalidInput(format!("writing {}: {}", path.display(), e))),
        None => {
            println!("{}", text);
            Ok(())
        }
    }
}

fn surface_from(
    cfg: &ConfigFile,
    tau: Option<&str>,
    w: Option<&str>,
    rho: Option<&str>,
    k: Option<usize>,
) -> Result<(SewnSurface, RunConfig)> {
    let tau = resolve_complex(tau, cfg, "tau", None)?;
    let w = resolve_complex(w, cfg, "w", None)?;
    let rho = resolve_complex(rho, cfg, "rho", None)?;
    let k = resolve_k(k, cfg)?;
    let surface = SewnSurface::new(tau, w, rho, k)?;
    let mut rc = RunConfig::bare("", Mode::Numeric);
    rc.tau = Some(format_complex(tau));
    rc.w = Some(format_complex(w));
    rc.rho = Some(format_complex(rho));
    rc.k = Some(k);
    Ok((surface, rc))
}

fn run(cli: Cli) -> Result<bool> {
    let cfg = match &cli.config {
        Some(path) => ConfigFile::load(path)?,
        None => ConfigFile::default(),
    };
    match &cli.command {
        Command::Omega { tau, w, rho, k } => {
            reject_exact(cli.mode)?;
            let (surface, mut rc) =
                surface_from(&cfg, tau.as_deref(), w.as_deref(), rho.as_deref(), *k)?;
            rc.command = "omega".into();
            let om = surface.period_matrix()?;
            let tail = surface.logdet_tail_estimate()?;
            let report = json!({
                "config": rc,
                "timestamp": timestamp(),
                "omega": [
                    [complex_json(&om.omega11), complex_json(&om.omega12)],
                    [complex_json(&om.omega12), complex_json(&om.omega22)],
                ],
                "K": surface.k_max,
                "spectral_radius": surface.det_inv.spectral_radius,
                "tail_bound": tail,
                "branch_tag": om.branch_tag,
                "im_positive_definite": om.imaginary_part_positive_definite(),
            });
            emit(&cli.output, &report)?;
            Ok(true)
        }
        Command::Z2 { tau, w, rho, k, rank, formula } => {
            reject_exact(cli.mode)?;
            // the limit value at rho = 0 is 1/eta^rank; the sewing machinery
            // needs rho != 0, so handle it directly
            let rho_c = resolve_complex(rho.as_deref(), &cfg, "rho", None)?;
            let mut rc = RunConfig::bare("z2", cli.mode);
            rc.rank = Some(*rank);
            if rho_c.norm() == 0.0 {
                let tau_c = resolve_complex(tau.as_deref(), &cfg, "tau", None)?;
                let value = eta_numeric(tau_c).powi(-(*rank as i32));
                rc.tau = Some(format_complex(tau_c));
                rc.rho = Some("0".into());
                rc.formula = Some("determinant".into());
                let report = json!({
                    "config": rc,
                    "timestamp": timestamp(),
                    "point": {"tau": complex_json(&tau_c), "rho": complex_json(&rho_c)},
                    "value": complex_json(&value),
                    "formula": "determinant",
                    "tail_bound": 0.0,
                });
                emit(&cli.output, &report)?;
                return Ok(true);
            }
            let (surface, base) =
                surface_from(&cfg, tau.as_deref(), w.as_deref(), rho.as_deref(), *k)?;
            rc.tau = base.tau;
            rc.w = base.w;
            rc.rho = base.rho;
            rc.k = base.k;
            let (value, formula_name, tail) = match formula {
                FormulaArg::Determinant => {
                    let z = z2_heisenberg(&surface, *rank)?;
                    (z.value, ZFormula::Determinant, z.tail_bound)
                }
                FormulaArg::Product => {
                    let z1 = z2_product_formula(&surface, &NecklaceExpansionConfig::default())?;
                    (z1.value.powi(*rank as i32), ZFormula::Product, z1.tail_bound * *rank as f64)
                }
                FormulaArg::OracleSeries => {
                    let series = fock::eta_z2_series_oracle(&surface.ctx.ell, surface.w(), 7)?;
                    let rho_v = surface.rho();
                    let base_val = series.evaluate(&rho_v) / surface.ctx.ell.eta();
                    let tail = series.coeff(7).norm() * rho_v.norm().powi(7) * 2.0;
                    (base_val.powi(*rank as i32), ZFormula::OracleSeries, tail)
                }
            };
            rc.formula = Some(
                match formula_name {
                    ZFormula::Determinant => "determinant",
                    ZFormula::Product => "product",
                    ZFormula::OracleSeries => "oracle-series",
                }
                .into(),
            );
            let report = json!({
                "config": rc,
                "timestamp": timestamp(),
                "point": {
                    "tau": complex_json(&surface.tau()),
                    "w": complex_json(&surface.w()),
                    "rho": complex_json(&surface.rho()),
                },
                "value": complex_json(&value),
                "formula": rc.formula,
                "tail_bound": tail,
            });
            emit(&cli.output, &report)?;
            Ok(true)
        }
        Command::Theta { tau, w, rho, k, lattice, cutoff } => {
            reject_exact(cli.mode)?;
            let (surface, base) =
                surface_from(&cfg, tau.as_deref(), w.as_deref(), rho.as_deref(), *k)?;
            let lat = load_lattice(lattice)?;
            let cutoff = resolve_usize(*cutoff, &cfg, "cutoff", 12)? as i64;
            let om = surface.period_matrix()?;
            let theta = siegel_theta(&lat, &om, cutoff)?;
            let mut rc = base;
            rc.command = "theta".into();
            rc.lattice = Some(lattice.clone());
            rc.cutoff = Some(cutoff as usize);
            let report = json!({
                "config": rc,
                "timestamp": timestamp(),
                "lattice": {"name": lat.name, "gram": lat.gram, "rank": lat.rank()},
                "value": complex_json(&theta.value),
                "norm_cutoff": theta.norm_cutoff,
                "terms": theta.terms,
                "tail_bound": theta.tail_bound,
            });
            emit(&cli.output, &report)?;
            Ok(true)
        }
        Command::Zlattice { tau, w, rho, k, lattice, cutoff } => {
            reject_exact(cli.mode)?;
            let (surface, base) =
                surface_from(&cfg, tau.as_deref(), w.as_deref(), rho.as_deref(), *k)?;
            let lat = load_lattice(lattice)?;
            let cutoff = resolve_usize(*cutoff, &cfg, "cutoff", 12)? as i64;
            let value = z2_lattice(&surface, &lat, cutoff)?;
            let mut rc = base;
            rc.command = "zlattice".into();
            rc.lattice = Some(lattice.clone());
            rc.cutoff = Some(cutoff as usize);
            let report = json!({
                "config": rc,
                "timestamp": timestamp(),
                "lattice": {"name": lat.name, "rank": lat.rank()},
                "value": complex_json(&value),
                "formula": "determinant-times-theta",
            });
            emit(&cli.output, &report)?;
            Ok(true)
        }
        Command::Verify { suite } => {
            let mut rc = RunConfig::bare("verify", cli.mode);
            rc.suite = Some(suite.clone());
            let suites: Vec<(String, Vec<verify::CheckResult>)> = if suite == "all" {
                if cli.mode == Mode::Exact {
                    vec![("exact-identities".into(), verify::criterion_exact_identities()?)]
                } else {
                    verify::run_all()?
                }
            } else {
                if cli.mode == Mode::Exact && suite != "exact-identities" {
                    return Err(Error::InvalidInput(
                        "exact mode runs only the exact-identities suite".into(),
                    ));
                }
                vec![(suite.clone(), verify::run_suite(suite)?)]
            };
            let mut all_pass = true;
            for (name, rows) in &suites {
                let _ = name;
                for r in rows {
                    println!(
                        "{} {} residual {:.4e} tolerance {:.1e} ({})",
                        if r.pass { "PASS" } else { "FAIL" },
                        r.check,
                        r.residual,
                        r.tolerance,
                        r.detail
                    );
                    all_pass &= r.pass;
                }
            }
            let report = json!({
                "config": rc,
                "timestamp": timestamp(),
                "suites": suites.iter().map(|(name, rows)| json!({
                    "suite": name,
                    "checks": rows,
                })).collect::<Vec<_>>(),
                "all_pass": all_pass,
            });
            emit(&cli.output, &report)?;
            Ok(all_pass)
        }
        Command::Sweep { sweep, tau, w, rho, chi, k, steps, csv } => {
            reject_exact(cli.mode)?;
            run_sweep(&cli, &cfg, *sweep, tau, w, rho, chi, *k, *steps, csv)
        }
        Command::Compare { tau, w, chi, k } => {
            reject_exact(cli.mode)?;
            let tau_c = resolve_complex(tau.as_deref(), &cfg, "tau", None)?;
            let w_c = resolve_complex(w.as_deref(), &cfg, "w", None)?;
            let chi_c = resolve_complex(chi.as_deref(), &cfg, "chi", None)?;
            let k = resolve_k(*k, &cfg)?;
            let t = ratio_t(tau_c, w_c, chi_c, k)?;
            let residual = ratio_residual(tau_c, w_c, chi_c, k)?;
            let f = fock::catalan_value(chi_c);
            let surface = SewnSurface::new(tau_c, w_c, -w_c * w_c * chi_c, k)?;
            let coords = two_tori_coordinates_from_omega(&surface.period_matrix()?)?;
            let mut rc = RunConfig::bare("compare", cli.mode);
            rc.tau = Some(format_complex(tau_c));
            rc.w = Some(format_complex(w_c));
            rc.chi = Some(format_complex(chi_c));
            rc.k = Some(k);
            let report = json!({
                "config": rc,
                "timestamp": timestamp(),
                "t_ratio": complex_json(&t),
                "f_chi": complex_json(&f),
                "f_pow_1_12_times_t": complex_json(&(f.powf(1.0 / 12.0) * t)),
                "residual_after_w4_term": residual,
                "two_tori_coordinates": {
                    "tau1": complex_json(&coords.tau1),
                    "tau2": complex_json(&coords.tau2),
                    "eps": complex_json(&coords.eps),
                    "neglect": coords.neglect,
                },
            });
            emit(&cli.output, &report)?;
            Ok(true)
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn run_sweep(
    cli: &Cli,
    cfg: &ConfigFile,
    mode: SweepMode,
    tau: &Option<String>,
    w: &Option<String>,
    rho: &Option<String>,
    chi: &Option<String>,
    k: Option<usize>,
    steps: Option<usize>,
    csv_path: &PathBuf,
) -> Result<bool> {
    let tau_c = resolve_complex(tau.as_deref(), cfg, "tau", None)?;
    let k = resolve_k(k, cfg)?;
    let mut writer = csv::Writer::from_path(csv_path)
        .map_err(|e| Error::InvalidInput(format!("csv {}: {}", csv_path.display(), e)))?;
    let mut rc = RunConfig::bare("sweep", Mode::Numeric);
    rc.tau = Some(format_complex(tau_c));
    rc.k = Some(k);
    rc.steps = steps;
    let mut skipped: Vec<String> = Vec::new();
    let summary = match mode {
        SweepMode::RhoRay => {
            rc.sweep = Some("rho-ray".into());
            let w_c = resolve_complex(w.as_deref(), cfg, "w", None)?;
            let rho_c = resolve_complex(rho.as_deref(), cfg, "rho", None)?;
            rc.w = Some(format_complex(w_c));
            rc.rho = Some(format_complex(rho_c));
            let steps = resolve_usize(steps, cfg, "steps", 24)?;
            writer
                .write_record([
                    "theta_turns",
                    "rho_re",
                    "rho_im",
                    "z_re",
                    "z_im",
                    "z_abs",
                    "jump_from_previous",
                ])
                .map_err(|e| Error::InvalidInput(e.to_string()))?;
            let mut prev: Option<Complex64> = None;
            let mut max_jump = 0.0f64;
            for i in 0..steps {
                let t = i as f64 / steps.max(1) as f64;
                let r = rho_c * (Complex64::i() * std::f64::consts::TAU * t).exp();
                match SewnSurface::new(tau_c, w_c, r, k).and_then(|s| z2_heisenberg(&s, 1)) {
                    Ok(z) => {
                        let jump = prev.map(|p| (z.value - p).norm()).unwrap_or(0.0);
                        max_jump = max_jump.max(jump);
                        prev = Some(z.value);
                        writer
                            .write_record([
                                format!("{}", t),
                                format!("{}", r.re),
                                format!("{}", r.im),
                                format!("{}", z.value.re),
                                format!("{}", z.value.im),
                                format!("{}", z.value.norm()),
                                format!("{}", jump),
                            ])
                            .map_err(|e| Error::InvalidInput(e.to_string()))?;
                    }
                    Err(e) => skipped.push(format!("theta {}: {}", t, e)),
                }
            }
            json!({"max_jump": max_jump, "branch_jump_flagged": max_jump > 0.5})
        }
        SweepMode::WHalving => {
            rc.sweep = Some("w-halving".into());
            let w0 = resolve_complex(w.as_deref(), cfg, "w", None)?;
            let chi_c = resolve_complex(chi.as_deref(), cfg, "chi", None)?;
            rc.w = Some(format_complex(w0));
            rc.chi = Some(format_complex(chi_c));
            let steps = resolve_usize(steps, cfg, "steps", 3)?;
            writer
                .write_record(["w_re", "w_im", "residual", "ratio_from_previous"])
                .map_err(|e| Error::InvalidInput(e.to_string()))?;
            let mut prev: Option<f64> = None;
            let mut ratios = Vec::new();
            for i in 0..steps {
                let w_i = w0 * 0.5f64.powi(i as i32);
                match ratio_residual(tau_c, w_i, chi_c, k) {
                    Ok(res) => {
                        let ratio = prev.map(|p| p / res);
                        if let Some(r) = ratio {
                            ratios.push(r);
                        }
                        prev = Some(res);
                        writer
                            .write_record([
                                format!("{}", w_i.re),
                                format!("{}", w_i.im),
                                format!("{}", res),
                                ratio.map(|r| format!("{}", r)).unwrap_or_default(),
                            ])
                            .map_err(|e| Error::InvalidInput(e.to_string()))?;
                    }
                    Err(e) => skipped.push(format!("w {}: {}", format_complex(w_i), e)),
                }
            }
            json!({"halving_ratios": ratios})
        }
    };
    writer.flush().map_err(|e| Error::InvalidInput(e.to_string()))?;
    let report = json!({
        "config": rc,
        "timestamp": timestamp(),
        "csv": csv_path.display().to_string(),
        "skipped": skipped,
        "summary": summary,
    });
    emit(&cli.output, &report)?;
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {}", e);
            ExitCode::from(1)
        }
    }
}
