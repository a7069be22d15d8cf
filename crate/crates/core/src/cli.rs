//! Command-line surface. Exit codes: 0 success, 2 verification failure,
//! 1 operational error (bad flags, unreadable files, solver failures).

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use nalgebra::DVector;

use crate::equilibrium::{solve_equilibrium_with, synthesize_equilibrium, NewtonSettings};
use crate::io::{
    load_case, save_case, save_modal_csv, save_sweep_csv, save_trajectory_csv, ReportFile,
};
use crate::linearization::{build_jacobian_auto, JacobianForm};
use crate::modal::{eigendecompose, to_modal, ModalTolerances};
use crate::model::SystemCase;
use crate::sim::{damping_sweep, integrate, integrate_modal, Disturbance, MeanMode, Trajectory};
use crate::verify::{VerifyConfig, VerifyTolerances};
use crate::{Error, Result};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_FAILED: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "relmotion",
    version,
    about = "Relative/mean motion analysis of classical-model multi-machine systems",
    after_help = "Exit codes: 0 success, 2 verification failure, 1 operational error.\n\
                  Machine indices on the command line are 1-based."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Equilibrium, assumption report and eigenvalue/mode table
    Analyze {
        case: PathBuf,
        #[command(flatten)]
        eq: EqArgs,
        /// Use the +c Jacobian form for the eigen table
        #[arg(long)]
        paper_form: bool,
        /// Report file; stdout when absent
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run every structural and decoupling check
    Verify {
        case: PathBuf,
        #[command(flatten)]
        eq: EqArgs,
        /// Samples per sampled check
        #[arg(long, default_value_t = 100)]
        samples: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Half-width (rad) of the box sampled states are drawn from
        #[arg(long, default_value_t = 1.0)]
        amplitude: f64,
        /// Tolerance for exact identities (row sums, translation invariance)
        #[arg(long, default_value_t = 1e-12)]
        tol_structural: f64,
        /// Tolerance for eigenstructure checks, relative to the Jacobian norm
        #[arg(long, default_value_t = 1e-8)]
        tol_eigen: f64,
        /// Tolerance for sampled nonlinear checks
        #[arg(long, default_value_t = 1e-9)]
        tol_sampled: f64,
        /// Check the eigenstructure of the +c Jacobian form
        #[arg(long)]
        paper_form: bool,
        /// Report file; stdout when absent
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Integrate from a disturbed equilibrium and write CSV
    Simulate {
        case: PathBuf,
        #[command(flatten)]
        eq: EqArgs,
        #[command(flatten)]
        perturb: PerturbArgs,
        #[arg(long)]
        tmax: f64,
        #[arg(long)]
        dt: f64,
        /// Integrate modal coordinates and write re/im column pairs
        #[arg(long)]
        modal: bool,
        /// With --modal: hold both mean coordinates at their initial values
        #[arg(long, conflicts_with = "zero_mean")]
        freeze_mean: bool,
        /// With --modal: set both mean coordinates to zero and hold them
        #[arg(long)]
        zero_mean: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Decoupling discrepancy for a list of damping spreads
    Sweep {
        case: PathBuf,
        #[command(flatten)]
        eq: EqArgs,
        #[command(flatten)]
        perturb: PerturbArgs,
        /// Relative damping spreads, comma-separated
        #[arg(long, value_delimiter = ',', required = true)]
        spreads: Vec<f64>,
        #[arg(long, default_value_t = 10.0)]
        tmax: f64,
        #[arg(long, default_value_t = 1e-3)]
        dt: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Replace Pm so that the given angles are an equilibrium
    Synthesize {
        case: PathBuf,
        /// Target angles (rad), comma-separated
        #[arg(
            long,
            value_delimiter = ',',
            required = true,
            allow_negative_numbers = true
        )]
        angles: Vec<f64>,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Args)]
struct EqArgs {
    /// Newton initial guess (rad), comma-separated; zeros by default
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    guess: Option<Vec<f64>>,
    /// Machine whose angle is pinned (1-based); the last machine by default
    #[arg(long)]
    reference: Option<usize>,
}

#[derive(Debug, Args)]
struct PerturbArgs {
    /// Disturbance "machine:ddelta:domega" (1-based machine); repeat or comma-separate
    #[arg(
        long,
        value_delimiter = ',',
        required = true,
        allow_hyphen_values = true
    )]
    perturb: Vec<String>,
}

impl EqArgs {
    fn apply(&self, m: usize, config: &mut VerifyConfig) -> Result<()> {
        if let Some(g) = &self.guess {
            if g.len() != m {
                return Err(Error::InvalidArgument(format!(
                    "--guess has {} entries, case has {m} machines",
                    g.len()
                )));
            }
            config.guess = Some(g.clone());
        }
        if let Some(r) = self.reference {
            if r == 0 || r > m {
                return Err(Error::InvalidArgument(format!(
                    "--reference must be in 1..={m}, got {r}"
                )));
            }
            config.reference = Some(r - 1);
        }
        Ok(())
    }
}

/// Parses `"i:dd:dw"` items (1-based `i`) into one disturbance; repeated machines add up.
pub fn parse_perturbations(specs: &[String], m: usize) -> Result<Disturbance> {
    let mut d = Disturbance::zeros(m);
    for spec in specs {
        let parts: Vec<&str> = spec.trim().split(':').collect();
        let bad = || {
            Error::InvalidArgument(format!(
                "bad perturbation {spec:?}, expected machine:ddelta:domega"
            ))
        };
        if parts.len() != 3 {
            return Err(bad());
        }
        let i: usize = parts[0].parse().map_err(|_| bad())?;
        let dd: f64 = parts[1].parse().map_err(|_| bad())?;
        let dw: f64 = parts[2].parse().map_err(|_| bad())?;
        if i == 0 || i > m {
            return Err(Error::InvalidArgument(format!(
                "perturbation machine {i} not in 1..={m}"
            )));
        }
        d.ddelta[i - 1] += dd;
        d.domega[i - 1] += dw;
    }
    Ok(d)
}

fn write_report(report: &ReportFile, out: &Option<PathBuf>) -> Result<()> {
    match out {
        Some(p) => report.save(p),
        None => {
            print!("{}", report.to_json());
            Ok(())
        }
    }
}

fn equilibrium_of(case: &SystemCase, eq: &EqArgs) -> Result<crate::Equilibrium> {
    let mut config = VerifyConfig::default();
    eq.apply(case.len(), &mut config)?;
    let guess = config
        .guess
        .map(DVector::from_vec)
        .unwrap_or_else(|| DVector::zeros(case.len()));
    solve_equilibrium_with(
        case,
        &guess,
        config.reference.unwrap_or(case.len() - 1),
        &NewtonSettings::default(),
    )
}

fn run(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Analyze {
            case,
            eq,
            paper_form,
            out,
        } => {
            let case = load_case(case)?;
            let mut config = VerifyConfig::default();
            eq.apply(case.len(), &mut config)?;
            if paper_form {
                config.form = JacobianForm::PaperEq4;
            }
            let report = ReportFile::analyze(&case, &config)?;
            write_report(&report, &out)?;
            Ok(EXIT_OK)
        }
        Command::Verify {
            case,
            eq,
            samples,
            seed,
            amplitude,
            tol_structural,
            tol_eigen,
            tol_sampled,
            paper_form,
            out,
        } => {
            let case = load_case(case)?;
            let mut config = VerifyConfig {
                samples,
                seed,
                amplitude,
                tolerances: VerifyTolerances {
                    structural: tol_structural,
                    eigen: tol_eigen,
                    sampled: tol_sampled,
                },
                ..VerifyConfig::default()
            };
            if paper_form {
                config.form = JacobianForm::PaperEq4;
            }
            eq.apply(case.len(), &mut config)?;
            let report = ReportFile::verify(&case, &config)?;
            write_report(&report, &out)?;
            let ver = report
                .verification
                .as_ref()
                .expect("verify report has checks");
            for c in &ver.checks {
                eprintln!(
                    "{} {:<10} worst {:.3e} tol {:.1e}",
                    if c.pass { "PASS" } else { "FAIL" },
                    c.name,
                    c.worst_residual,
                    c.tolerance
                );
            }
            if ver.overall_pass {
                Ok(EXIT_OK)
            } else {
                eprintln!("failing checks: {}", ver.failing().join(", "));
                Ok(EXIT_FAILED)
            }
        }
        Command::Simulate {
            case,
            eq,
            perturb,
            tmax,
            dt,
            modal,
            freeze_mean,
            zero_mean,
            out,
        } => {
            let case = load_case(case)?;
            if (freeze_mean || zero_mean) && !modal {
                return Err(Error::InvalidArgument(
                    "--freeze-mean/--zero-mean need --modal".into(),
                ));
            }
            let eqm = equilibrium_of(&case, &eq)?;
            let initial = parse_perturbations(&perturb.perturb, case.len())?.apply(&eqm)?;
            if modal {
                let (bundle, _) = build_jacobian_auto(&case, &eqm.delta(), JacobianForm::Physical)?;
                let basis = eigendecompose(&bundle, &ModalTolerances::default())?;
                let mode = if zero_mean {
                    MeanMode::FreezeZero
                } else if freeze_mean {
                    MeanMode::FreezeInitial
                } else {
                    MeanMode::Evolve
                };
                let y0 = to_modal(&basis, &initial)?;
                let tr = integrate_modal(&case, &basis, &y0, tmax, dt, mode)?;
                save_modal_csv(&tr, out)?;
            } else {
                let tr: Trajectory = integrate(&case, &initial, tmax, dt)?;
                save_trajectory_csv(&tr, out)?;
            }
            Ok(EXIT_OK)
        }
        Command::Sweep {
            case,
            eq,
            perturb,
            spreads,
            tmax,
            dt,
            out,
        } => {
            let case = load_case(case)?;
            let eqm = equilibrium_of(&case, &eq)?;
            let d = parse_perturbations(&perturb.perturb, case.len())?;
            let rows = damping_sweep(&case, &eqm, &spreads, &d, tmax, dt)?;
            save_sweep_csv(&rows, out)?;
            Ok(EXIT_OK)
        }
        Command::Synthesize { case, angles, out } => {
            let case = load_case(case)?;
            if angles.len() != case.len() {
                return Err(Error::InvalidArgument(format!(
                    "--angles has {} entries, case has {} machines",
                    angles.len(),
                    case.len()
                )));
            }
            let new = synthesize_equilibrium(&case, &DVector::from_vec(angles))?;
            save_case(&new, out)?;
            Ok(EXIT_OK)
        }
    }
}

/// Parses `args` (including the program name) and runs one subcommand.
pub fn cli_main<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_ERROR } else { EXIT_OK };
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_ERROR
        }
    }
}
