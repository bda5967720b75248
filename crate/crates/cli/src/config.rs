//! Scenario configuration: file parsing, flag overrides and seed resolution.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use msqkd::adversary::{
    collective_constraint_report, AttackStrategy, CollectiveParams, CollectiveVariant,
    ConstraintReport, StrategyDoc, StrategySpec, BUILTIN_STRATEGIES,
};
use msqkd::protocol::ProtocolConfig;
use msqkd::qubit::Basis1Q;
use serde::{Deserialize, Serialize};

/// Environment variable consulted for the seed when neither the flag nor the
/// config file sets one.
pub const SEED_ENV: &str = "MSQKD_SEED";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

/// Protocol fields as they appear in a config file; absent fields keep their
/// defaults.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolSection {
    pub rounds: Option<usize>,
    pub p_alice_mh: Option<f64>,
    pub p_bob_mh: Option<f64>,
    pub check_fraction: Option<f64>,
    pub error_threshold: Option<f64>,
    pub master_seed: Option<u64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub path: Option<PathBuf>,
    pub format: Option<Format>,
}

/// A strategy given either as a built-in name or as a structured document.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum StrategyField {
    Name(String),
    Doc(StrategyDoc),
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub protocol: ProtocolSection,
    #[serde(default, deserialize_with = "strategy_field")]
    pub strategy: Option<StrategyField>,
    #[serde(default)]
    pub output: OutputSection,
    pub n_values: Option<Vec<u32>>,
}

/// Parses the strategy through an intermediate value so that a malformed
/// document reports the real cause instead of "no variant matched".
fn strategy_field<'de, D: serde::Deserializer<'de>>(
    d: D,
) -> Result<Option<StrategyField>, D::Error> {
    use serde::de::Error;
    let v = Option::<serde_json::Value>::deserialize(d)?;
    match v {
        None => Ok(None),
        Some(serde_json::Value::String(s)) => Ok(Some(StrategyField::Name(s))),
        Some(other) => serde_json::from_value::<StrategyDoc>(other)
            .map(|doc| Some(StrategyField::Doc(doc)))
            .map_err(D::Error::custom),
    }
}

impl ScenarioConfig {
    /// Reads a config file: TOML for a `.toml` extension, JSON otherwise.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let is_toml = path
            .extension()
            .is_some_and(|e| e.eq_ignore_ascii_case("toml"));
        if is_toml {
            toml::from_str(&text).map_err(|e| anyhow!("config {}: {e}", path.display()))
        } else {
            serde_json::from_str(&text).map_err(|e| anyhow!("config {}: {e}", path.display()))
        }
    }
}

/// Command-line overrides shared by every subcommand.
#[derive(Clone, Debug, Default, clap::Args)]
pub struct CommonArgs {
    /// Number of rounds (qubits prepared by the TP).
    #[arg(long)]
    pub rounds: Option<usize>,
    /// Master seed; falls back to the config file, then MSQKD_SEED, then 0.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Built-in strategy name.
    #[arg(long)]
    pub strategy: Option<String>,
    /// Scenario config file (JSON, or TOML by extension).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output file; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    #[arg(long)]
    pub check_fraction: Option<f64>,
    #[arg(long)]
    pub p_alice_mh: Option<f64>,
    #[arg(long)]
    pub p_bob_mh: Option<f64>,
    /// Comma-separated group sizes for detection curves.
    #[arg(long, value_delimiter = ',')]
    pub n_values: Option<Vec<u32>>,
}

/// Everything a command needs after merging defaults, file and flags.
#[derive(Clone, Debug)]
pub struct Resolved {
    pub protocol: ProtocolConfig,
    pub strategy: AttackStrategy,
    /// True when no strategy was given anywhere.
    pub strategy_defaulted: bool,
    /// Constraint report when the strategy came from collective parameters.
    pub constraints: Option<ConstraintReport>,
    pub out: Option<PathBuf>,
    pub format: Option<Format>,
    pub n_values: Option<Vec<u32>>,
}

fn env_seed() -> Result<Option<u64>> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|e| anyhow!("{SEED_ENV}={v:?} is not a valid seed: {e}")),
        Err(std::env::VarError::NotPresent) => Ok(None),
        Err(e) => bail!("{SEED_ENV}: {e}"),
    }
}

fn builtin(name: &str) -> Result<AttackStrategy> {
    AttackStrategy::builtin(name).ok_or_else(|| {
        anyhow!(
            "strategy: unknown built-in {name:?}; expected one of {}",
            BUILTIN_STRATEGIES.join(", ")
        )
    })
}

fn constraints_for(field: &StrategyField) -> Result<Option<ConstraintReport>> {
    let report = match field {
        StrategyField::Name(n) if n == "collective-zero-detection" => collective_constraint_report(
            &CollectiveParams::zero_detection(),
            CollectiveVariant::Shared,
            Basis1Q::Z,
        )?,
        StrategyField::Doc(StrategyDoc {
            spec:
                StrategySpec::CollectiveParams {
                    params,
                    variant,
                    tp_basis,
                },
            ..
        }) => collective_constraint_report(params, *variant, tp_basis.clone().try_into()?)?,
        _ => return Ok(None),
    };
    Ok(Some(report))
}

pub fn resolve(args: &CommonArgs) -> Result<Resolved> {
    let file = match &args.config {
        Some(p) => ScenarioConfig::load(p)?,
        None => ScenarioConfig::default(),
    };
    let d = ProtocolConfig::default();
    let p = &file.protocol;
    let seed = match (args.seed, p.master_seed) {
        (Some(s), _) | (None, Some(s)) => s,
        (None, None) => env_seed()?.unwrap_or(0),
    };
    let protocol = ProtocolConfig {
        rounds: args.rounds.or(p.rounds).unwrap_or(d.rounds),
        p_alice_mh: args.p_alice_mh.or(p.p_alice_mh).unwrap_or(d.p_alice_mh),
        p_bob_mh: args.p_bob_mh.or(p.p_bob_mh).unwrap_or(d.p_bob_mh),
        check_fraction: args
            .check_fraction
            .or(p.check_fraction)
            .unwrap_or(d.check_fraction),
        error_threshold: p.error_threshold.unwrap_or(d.error_threshold),
        master_seed: seed,
    };
    protocol.validate()?;

    let field = match &args.strategy {
        Some(name) => Some(StrategyField::Name(name.clone())),
        None => file.strategy.clone(),
    };
    let (strategy, constraints) = match &field {
        None => (AttackStrategy::honest(), None),
        Some(f @ StrategyField::Name(name)) => (builtin(name)?, constraints_for(f)?),
        Some(f @ StrategyField::Doc(doc)) => (
            AttackStrategy::try_from(doc.clone()).context("strategy")?,
            constraints_for(f)?,
        ),
    };
    Ok(Resolved {
        protocol,
        strategy,
        strategy_defaulted: field.is_none(),
        constraints,
        out: args.out.clone().or(file.output.path),
        format: args.format.or(file.output.format),
        n_values: args.n_values.clone().or(file.n_values),
    })
}
