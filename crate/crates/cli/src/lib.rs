//! Command implementations behind the `msqkd` binary.

pub mod config;
pub mod verify;

use std::path::Path;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use msqkd::adversary::{ConstraintReport, StrategyDoc};
use msqkd::analysis::{
    chi_square_case_test, curve_csv, detection_report, efficiency_expected,
    exact_distinguishability, ChiSquareResult, CurvePoint, DetectionReport, CHI_SQUARE_MIN_TOTAL,
    HONEST_CASE_WEIGHTS,
};
use msqkd::protocol::{
    qubit_efficiency, run_protocol, AbortReason, CaseHistogram, Execution, ProtocolConfig,
};
use serde::{Deserialize, Serialize};

use config::{resolve, CommonArgs, Format};

/// Distinguishability at or below this counts as "no key information".
pub const NO_INFORMATION_TOL: f64 = 1e-10;

/// Group sizes used by `attack` when none are configured.
pub const DEFAULT_N_VALUES: [u32; 4] = [1, 4, 16, 64];

#[derive(Debug, Parser)]
#[command(
    name = "msqkd",
    version,
    about = "Mediated semi-quantum key distribution simulator and attack verifier"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the protocol and report the sifting outcome.
    Run {
        #[command(flatten)]
        common: CommonArgs,
        /// Include both raw keys in the output.
        #[arg(long)]
        keys: bool,
    },
    /// Run an attack and compare its detection rate with the exact value.
    Attack {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Emit a detection curve over group sizes as plot-ready CSV.
    Sweep {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Check every reference number and a Monte Carlo cross-check.
    Verify {
        #[command(flatten)]
        common: CommonArgs,
        /// Shift one expected value so the check must fail.
        #[arg(long, hide = true)]
        perturb: bool,
    },
}

/// How a command finished, mapped onto the process exit code.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Success,
    /// The protocol aborted or a verification check failed.
    Failure,
}

impl Status {
    pub fn code(self) -> u8 {
        match self {
            Status::Success => 0,
            Status::Failure => 2,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub strategy: StrategyDoc,
    pub protocol: ProtocolConfig,
    pub key_length: usize,
    pub disclosed: usize,
    /// Raw-key bits per prepared qubit.
    pub efficiency: f64,
    pub expected_efficiency: f64,
    pub per_situation_error_rate: [f64; 4],
    pub situation_rounds: [u64; 4],
    pub situation_checked: [u64; 4],
    pub situation_errors: [u64; 4],
    pub aborted: bool,
    pub abort_reason: AbortReason,
    pub case_histogram: CaseHistogram,
    /// Goodness of fit against the honest case weights; absent for small
    /// runs and for histograms containing off-table rounds.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chi_square: Option<ChiSquareResult>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raw_key_alice: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raw_key_bob: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttackOutput {
    pub strategy_doc: StrategyDoc,
    pub report: DetectionReport,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub constraints: Option<ConstraintReport>,
    pub findings: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepOutput {
    pub strategy: String,
    pub rounds: usize,
    pub seed: u64,
    pub per_round_detection: f64,
    pub curve: Vec<CurvePoint>,
}

fn bits(key: &[u8]) -> String {
    key.iter().map(|b| char::from(b'0' + b)).collect()
}

/// Writes `text` to `out`, or standard output when absent.
pub fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn json<T: Serialize>(v: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(v)?;
    s.push('\n');
    Ok(s)
}

pub fn cmd_run(common: &CommonArgs, keys: bool) -> Result<Status> {
    let r = resolve(common)?;
    let cfg = &r.protocol;
    let (_, outcome) = run_protocol(cfg, &r.strategy, Execution::Parallel)?;
    let chi_square =
        if outcome.counts.total() >= CHI_SQUARE_MIN_TOTAL && outcome.counts.off_table == 0 {
            Some(chi_square_case_test(
                &outcome.counts,
                &HONEST_CASE_WEIGHTS,
                0.01,
            )?)
        } else {
            None
        };
    let summary = RunSummary {
        strategy: r.strategy.clone().into(),
        protocol: cfg.clone(),
        key_length: outcome.raw_key_alice.len(),
        disclosed: outcome.disclosed_positions.len(),
        efficiency: qubit_efficiency(&outcome, cfg),
        expected_efficiency: efficiency_expected(cfg),
        per_situation_error_rate: outcome.per_situation_error_rate,
        situation_rounds: outcome.situation_rounds,
        situation_checked: outcome.situation_checked,
        situation_errors: outcome.situation_errors,
        aborted: outcome.aborted,
        abort_reason: outcome.abort_reason,
        case_histogram: outcome.counts.clone(),
        chi_square,
        raw_key_alice: keys.then(|| bits(&outcome.raw_key_alice)),
        raw_key_bob: keys.then(|| bits(&outcome.raw_key_bob)),
    };
    let text = match r.format.unwrap_or(Format::Json) {
        Format::Json => json(&summary)?,
        Format::Csv => run_csv(&summary),
    };
    emit(r.out.as_deref(), &text)?;
    if summary.aborted {
        eprintln!("protocol aborted: {:?}", summary.abort_reason);
        Ok(Status::Failure)
    } else {
        Ok(Status::Success)
    }
}

fn run_csv(s: &RunSummary) -> String {
    let mut rows = vec![
        ("rounds".to_string(), s.protocol.rounds.to_string()),
        ("seed".into(), s.protocol.master_seed.to_string()),
        ("key_length".into(), s.key_length.to_string()),
        ("disclosed".into(), s.disclosed.to_string()),
        ("efficiency".into(), s.efficiency.to_string()),
        (
            "expected_efficiency".into(),
            s.expected_efficiency.to_string(),
        ),
        ("aborted".into(), s.aborted.to_string()),
    ];
    for (k, rate) in s.per_situation_error_rate.iter().enumerate() {
        rows.push((format!("error_rate_situation_{}", k + 1), rate.to_string()));
    }
    for (k, c) in s.case_histogram.cases.iter().enumerate() {
        rows.push((format!("case_{}", k + 1), c.to_string()));
    }
    rows.push(("off_table".into(), s.case_histogram.off_table.to_string()));
    let mut out = String::from("field,value\n");
    for (k, v) in rows {
        out.push_str(&format!("{k},{v}\n"));
    }
    out
}

pub fn cmd_attack(common: &CommonArgs) -> Result<Status> {
    let r = resolve(common)?;
    if r.strategy_defaulted {
        bail!("strategy: `attack` needs a strategy (--strategy or the config's `strategy` field)");
    }
    if r.strategy.is_honest() {
        bail!("strategy: `attack` needs a non-honest strategy");
    }
    let n_values = r
        .n_values
        .clone()
        .unwrap_or_else(|| DEFAULT_N_VALUES.to_vec());
    if n_values.is_empty() {
        bail!("n_values: must not be empty");
    }
    let report = detection_report(&r.strategy, &r.protocol, &n_values, Execution::Parallel)?;

    let mut findings = vec![format!(
        "per-round detection: oracle {:.6}, empirical {:.6} (stderr {:.6}), verdict {}",
        report.per_round_detection, report.empirical_detection, report.stderr, report.verdict
    )];
    if report.per_round_detection == 0.0 {
        findings.push("detection probability 0: no check ever flags this attack".into());
    }
    let no_info = report
        .exact_distinguishability
        .is_some_and(|d| d <= NO_INFORMATION_TOL)
        && report
            .distinguishability
            .is_none_or(|d| d <= NO_INFORMATION_TOL);
    if no_info {
        findings.push(
            "no key information: the TP's memory is identical for both key-bit values".into(),
        );
    } else if let Some(d) = report.exact_distinguishability {
        findings.push(format!(
            "key distinguishability from the TP's memory: {d:.6}"
        ));
    } else if let Err(e) = exact_distinguishability(&r.strategy, &r.protocol) {
        findings.push(format!("key distinguishability undefined: {e}"));
    }
    for f in &findings {
        eprintln!("{f}");
    }

    let consistent = report.consistent;
    let out = AttackOutput {
        strategy_doc: r.strategy.clone().into(),
        report,
        constraints: r.constraints,
        findings,
    };
    let text = match r.format.unwrap_or(Format::Json) {
        Format::Json => json(&out)?,
        Format::Csv => curve_csv(&out.report.curve),
    };
    emit(r.out.as_deref(), &text)?;
    Ok(if consistent {
        Status::Success
    } else {
        Status::Failure
    })
}

pub fn cmd_sweep(common: &CommonArgs) -> Result<Status> {
    let r = resolve(common)?;
    let n_values = match r.n_values.clone() {
        Some(v) if !v.is_empty() => v,
        Some(_) => bail!("n_values: must not be empty"),
        None => bail!(
            "n_values: `sweep` needs group sizes (--n-values or the config's `n_values` field)"
        ),
    };
    let report = detection_report(&r.strategy, &r.protocol, &n_values, Execution::Parallel)?;
    let text = match r.format.unwrap_or(Format::Csv) {
        Format::Csv => curve_csv(&report.curve),
        Format::Json => json(&SweepOutput {
            strategy: report.strategy.clone(),
            rounds: report.rounds,
            seed: report.seed,
            per_round_detection: report.per_round_detection,
            curve: report.curve.clone(),
        })?,
    };
    emit(r.out.as_deref(), &text)?;
    Ok(Status::Success)
}

pub fn execute(cli: &Cli) -> Result<Status> {
    match &cli.command {
        Command::Run { common, keys } => cmd_run(common, *keys),
        Command::Attack { common } => cmd_attack(common),
        Command::Sweep { common } => cmd_sweep(common),
        Command::Verify { common, perturb } => verify::cmd_verify(common, *perturb),
    }
}
