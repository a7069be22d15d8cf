//! Case files, report files and trajectory CSV.
//!
//! Case and report files are JSON. Matrices are row-major nested arrays and
//! every file carries `schema_version`. Floats are written in shortest
//! round-trip form, so a reload gives back identical values.

use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::equilibrium::{
    check_assumptions_spectrum, solve_equilibrium_with, AssumptionReport, AssumptionTolerances,
    Equilibrium,
};
use crate::linearization::build_jacobian_auto;
use crate::modal::{eigendecompose, eigenvalues, ModalBasis};
use crate::model::{case_fingerprint, validate_case, MachineParams, NetworkParams, SystemCase};
use crate::sim::{ModalTrajectory, SweepRow, Trajectory};
use crate::verify::{run_verification, VerificationReport, VerifyConfig};
use crate::{Error, Result, C64};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MachineEntry {
    #[serde(rename = "H")]
    pub h: f64,
    #[serde(rename = "D")]
    pub d: f64,
    #[serde(rename = "Pm")]
    pub pm: f64,
    #[serde(rename = "E")]
    pub e: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkEntry {
    #[serde(rename = "G")]
    pub g: Vec<f64>,
    #[serde(rename = "C")]
    pub c: Vec<Vec<f64>>,
    #[serde(rename = "Dmat")]
    pub dmat: Vec<Vec<f64>>,
}

/// On-disk form of a [`SystemCase`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaseFile {
    pub schema_version: u32,
    pub omega_s: f64,
    pub machines: Vec<MachineEntry>,
    pub network: NetworkEntry,
}

fn rows_of(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| m.row(i).iter().copied().collect())
        .collect()
}

fn matrix_from_rows(name: &str, rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let n = rows.len();
    for (i, r) in rows.iter().enumerate() {
        if r.len() != n {
            return Err(Error::Schema(format!(
                "network.{name}[{i}] has {} entries, expected {n} (square matrix)",
                r.len()
            )));
        }
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

impl CaseFile {
    pub fn from_case(case: &SystemCase) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            omega_s: case.omega_s,
            machines: case
                .machines
                .iter()
                .map(|mc| MachineEntry {
                    h: mc.h,
                    d: mc.d,
                    pm: mc.pm,
                    e: mc.e,
                })
                .collect(),
            network: NetworkEntry {
                g: case.network.g.iter().copied().collect(),
                c: rows_of(&case.network.c),
                dmat: rows_of(&case.network.dmat),
            },
        }
    }

    /// Builds the case and checks every invariant, reporting violations by location.
    pub fn into_case(self) -> Result<SystemCase> {
        let case = SystemCase {
            omega_s: self.omega_s,
            machines: self
                .machines
                .iter()
                .map(|e| MachineParams::new(e.h, e.d, e.pm, e.e))
                .collect(),
            network: NetworkParams {
                g: DVector::from_vec(self.network.g),
                c: matrix_from_rows("C", &self.network.c)?,
                dmat: matrix_from_rows("Dmat", &self.network.dmat)?,
            },
        };
        let report = validate_case(&case);
        if report.passed() {
            Ok(case)
        } else {
            Err(Error::Validation(report.messages()))
        }
    }
}

/// Parses case JSON: syntax errors are [`Error::Parse`], a wrong version or
/// shape is [`Error::Schema`], violated invariants are [`Error::Validation`].
pub fn parse_case(text: &str) -> Result<SystemCase> {
    let value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    match value.get("schema_version") {
        None => return Err(Error::Schema("missing field `schema_version`".into())),
        Some(v) if v.as_u64() != Some(SCHEMA_VERSION as u64) => {
            return Err(Error::Schema(format!(
                "unsupported schema_version {v}, expected {SCHEMA_VERSION}"
            )))
        }
        _ => {}
    }
    let file: CaseFile = serde_json::from_value(value).map_err(|e| Error::Schema(e.to_string()))?;
    file.into_case()
}

pub fn load_case(path: impl AsRef<Path>) -> Result<SystemCase> {
    parse_case(&fs::read_to_string(path)?)
}

pub fn case_to_json(case: &SystemCase) -> String {
    let mut s = serde_json::to_string_pretty(&CaseFile::from_case(case)).expect("case serializes");
    s.push('\n');
    s
}

pub fn save_case(case: &SystemCase, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, case_to_json(case))?;
    Ok(())
}

/// Eigenvector entries of the two mean-motion modes, as `[re, im]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeanModeEntries {
    pub zero_mode: Vec<[f64; 2]>,
    pub damping_mode: Vec<[f64; 2]>,
}

/// Everything `analyze` and `verify` write out. The settings block is
/// sufficient to rerun the same computation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportFile {
    pub schema_version: u32,
    pub command: String,
    pub case_fingerprint: String,
    pub settings: VerifyConfig,
    pub equilibrium: Equilibrium,
    pub assumptions: AssumptionReport,
    /// `[re, im]` in modal order when a modal basis exists, solver order otherwise.
    pub eigenvalues: Vec<[f64; 2]>,
    pub mean_modes: Option<MeanModeEntries>,
    /// Present when the basis could not be built.
    pub modal_error: Option<String>,
    pub verification: Option<VerificationReport>,
}

fn pair(z: &C64) -> [f64; 2] {
    [z.re, z.im]
}

impl ReportFile {
    fn build(
        case: &SystemCase,
        config: &VerifyConfig,
        command: &str,
    ) -> Result<(Self, Option<ModalBasis>)> {
        let m = case.len();
        let guess = match &config.guess {
            Some(g) => DVector::from_column_slice(g),
            None => DVector::zeros(m),
        };
        let reference = config.reference.unwrap_or(m - 1);
        let eq = solve_equilibrium_with(case, &guess, reference, &config.newton)?;
        let (bundle, _) = build_jacobian_auto(case, &eq.delta(), config.form)?;
        let basis = eigendecompose(&bundle, &config.modal);
        let (eigenvalues, mean_modes, modal_error, basis) = match basis {
            Ok(b) => {
                let entries = MeanModeEntries {
                    zero_mode: b.right(b.zero_mode()).iter().map(pair).collect(),
                    damping_mode: b.right(b.damping_mode()).iter().map(pair).collect(),
                };
                let ev: Vec<C64> = b.eigenvalues.clone();
                (ev, Some(entries), None, Some(b))
            }
            Err(e) => {
                let ev = eigenvalues(&bundle.j)?;
                (ev, None, Some(e.to_string()), None)
            }
        };
        let assumptions = check_assumptions_spectrum(
            case,
            &eq,
            &eigenvalues,
            bundle.j.norm(),
            &AssumptionTolerances::default(),
        );
        let report = Self {
            schema_version: SCHEMA_VERSION,
            command: command.to_string(),
            case_fingerprint: case_fingerprint(case),
            settings: config.clone(),
            equilibrium: eq,
            assumptions,
            eigenvalues: eigenvalues.iter().map(pair).collect(),
            mean_modes,
            modal_error,
            verification: None,
        };
        Ok((report, basis))
    }

    /// Equilibrium, assumption report and eigen table; no sampled checks.
    pub fn analyze(case: &SystemCase, config: &VerifyConfig) -> Result<Self> {
        Ok(Self::build(case, config, "analyze")?.0)
    }

    /// [`ReportFile::analyze`] plus the full verification run.
    pub fn verify(case: &SystemCase, config: &VerifyConfig) -> Result<Self> {
        let (mut report, _) = Self::build(case, config, "verify")?;
        report.verification = Some(run_verification(case, config)?);
        Ok(report)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_json())?;
        Ok(())
    }
}

/// Shortest representation that parses back to the same `f64`.
fn num(v: f64) -> String {
    format!("{v:?}")
}

fn trajectory_header(m: usize) -> Vec<String> {
    let mut h = vec!["t".to_string()];
    h.extend((1..=m).map(|i| format!("delta_{i}")));
    h.extend((1..=m).map(|i| format!("omega_{i}")));
    h
}

fn write_rows<W: std::io::Write>(
    out: W,
    header: Vec<String>,
    rows: impl Iterator<Item = Vec<String>>,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(&header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_trajectory_csv<W: std::io::Write>(tr: &Trajectory, out: W) -> Result<()> {
    if tr.is_empty() {
        return Err(Error::InvalidArgument(
            "refusing to write an empty trajectory".into(),
        ));
    }
    let m = tr.states[0].len();
    let rows = tr.times.iter().zip(&tr.states).map(|(t, s)| {
        std::iter::once(*t)
            .chain(s.delta.iter().copied())
            .chain(s.speed.iter().copied())
            .map(num)
            .collect()
    });
    write_rows(out, trajectory_header(m), rows)
}

pub fn save_trajectory_csv(tr: &Trajectory, path: impl AsRef<Path>) -> Result<()> {
    if tr.is_empty() {
        return Err(Error::InvalidArgument(
            "refusing to write an empty trajectory".into(),
        ));
    }
    write_trajectory_csv(tr, fs::File::create(path)?)
}

/// Header `t,y_1_re,y_1_im,...`.
pub fn save_modal_csv(tr: &ModalTrajectory, path: impl AsRef<Path>) -> Result<()> {
    if tr.is_empty() {
        return Err(Error::InvalidArgument(
            "refusing to write an empty trajectory".into(),
        ));
    }
    let n = tr.coords[0].len();
    let mut header = vec!["t".to_string()];
    for k in 1..=n {
        header.push(format!("y_{k}_re"));
        header.push(format!("y_{k}_im"));
    }
    let rows = tr.times.iter().zip(&tr.coords).map(|(t, y)| {
        let mut r = vec![num(*t)];
        for z in y.iter() {
            r.push(num(z.re));
            r.push(num(z.im));
        }
        r
    });
    write_rows(fs::File::create(path)?, header, rows)
}

/// Header `spread,ratio_1..ratio_m,max_discrepancy,max_coi_discrepancy`.
pub fn save_sweep_csv(rows: &[SweepRow], path: impl AsRef<Path>) -> Result<()> {
    let Some(first) = rows.first() else {
        return Err(Error::InvalidArgument(
            "refusing to write an empty sweep".into(),
        ));
    };
    let mut header = vec!["spread".to_string()];
    header.extend((1..=first.ratios.len()).map(|i| format!("ratio_{i}")));
    header.push("max_discrepancy".into());
    header.push("max_coi_discrepancy".into());
    let out = rows.iter().map(|r| {
        std::iter::once(r.spread)
            .chain(r.ratios.iter().copied())
            .chain([r.max_discrepancy, r.max_coi_discrepancy])
            .map(num)
            .collect()
    });
    write_rows(fs::File::create(path)?, header, out)
}

/// Reads a file written by [`save_trajectory_csv`].
pub fn read_trajectory_csv(path: impl AsRef<Path>) -> Result<Trajectory> {
    let mut r = csv::Reader::from_path(path)?;
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header.len() < 3 || header.len().is_multiple_of(2) {
        return Err(Error::Parse(format!(
            "unexpected trajectory header {header:?}"
        )));
    }
    let m = (header.len() - 1) / 2;
    if header != trajectory_header(m) {
        return Err(Error::Parse(format!(
            "unexpected trajectory header {header:?}"
        )));
    }
    let mut times = Vec::new();
    let mut states = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let vals = rec
            .iter()
            .map(|s| {
                s.parse::<f64>()
                    .map_err(|e| Error::Parse(format!("{s:?}: {e}")))
            })
            .collect::<Result<Vec<f64>>>()?;
        times.push(vals[0]);
        states.push(crate::model::StateVec::new(
            DVector::from_column_slice(&vals[1..=m]),
            DVector::from_column_slice(&vals[m + 1..]),
        )?);
    }
    Ok(Trajectory { times, states })
}
