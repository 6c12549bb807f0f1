//! Configuration handling, command execution and output files for the
//! `rkhs-probe` binary.
//!
//! Each command takes a JSON configuration, runs deterministically and
//! produces a set of named output documents plus a [`RunManifest`]. The
//! binary writes them into the output directory.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::gp::{
    compare_bands, domain_from_json, fit_with, membership_diagnostic_with, uniform_grid, BandVariant, Design,
    DesignRule, MembershipOptions, Observations, SolveOptions, TestFunction,
};
use crate::hankel::{
    beta_variance_by_canonical, blue_variance_seq_with, closed_form_variance_at, gaussian_variance_by_recurrence,
    HankelOptions, PathPreference, CLOSED_FORM_PRECISION,
};
use crate::kernel::Kernel;
use crate::moments::{determinacy_indicators, even_moments, reject_unknown, SpectralFamily};
use crate::scalar::{scalar_from_json, Scalar, DEFAULT_PRECISION, PRECISION_CEILING};

pub const DEFAULT_N_MAX_CAP: usize = 64;
pub const DEFAULT_N_CAP: usize = 200;
pub const DEFAULT_GRID_SIZE: usize = 1001;
pub const DEFAULT_DETERMINACY_N: usize = 256;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_PRECISION: i32 = 2;
pub const EXIT_CONFIG: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "rkhs-probe", version, about = "Hankel-determinant BLUE variances and kriging diagnostics")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct GlobalArgs {
    /// JSON configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,
    /// Starting precision in bits for escalating computations.
    #[arg(long, global = true)]
    pub precision_start: Option<u32>,
    /// Largest precision in bits before giving up with exit code 2.
    #[arg(long, global = true)]
    pub precision_ceiling: Option<u32>,
    /// Confidence band variant.
    #[arg(long, global = true, value_parser = ["paper", "standard"])]
    pub band_variant: Option<String>,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// BLUE variances H_n / G_n for n = 0..=n_max.
    VarianceSeq {
        /// Family JSON, instead of a config file.
        #[arg(long)]
        family: Option<String>,
        #[arg(long)]
        n_max: Option<usize>,
    },
    /// Carleman partial sums, rate label and determinacy verdict.
    Determinacy,
    /// Kriging mean, conditional variance and confidence bands on a grid.
    Krige,
    /// N * sigma2_hat over a schedule of designs.
    Membership,
    /// Direct determinants against closed forms.
    ClosedFormCheck,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::VarianceSeq { .. } => "variance-seq",
            Command::Determinacy => "determinacy",
            Command::Krige => "krige",
            Command::Membership => "membership",
            Command::ClosedFormCheck => "closed-form-check",
        }
    }
}

/// Overrides from command-line flags.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub precision_start: Option<u32>,
    pub precision_ceiling: Option<u32>,
    pub band_variant: Option<BandVariant>,
}

/// Record of one run, written next to its outputs.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config_sha256: String,
    pub library_version: String,
    pub precision_bits: BTreeMap<String, Value>,
    pub wall_time_seconds: BTreeMap<String, f64>,
    pub outputs: Vec<String>,
}

/// Named output documents of a command.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub files: Vec<(String, String)>,
    pub manifest: RunManifest,
}

impl RunOutput {
    pub fn file(&self, name: &str) -> Option<&str> {
        self.files.iter().find(|(n, _)| n == name).map(|(_, c)| c.as_str())
    }

    /// Write all outputs and `manifest.json` into `dir`.
    pub fn write_to(&self, dir: &Path) -> std::io::Result<Vec<PathBuf>> {
        fs::create_dir_all(dir)?;
        let mut written = Vec::new();
        for (name, contents) in &self.files {
            let path = dir.join(name);
            fs::write(&path, contents)?;
            written.push(path);
        }
        let path = dir.join("manifest.json");
        fs::write(&path, pretty(&serde_json::to_value(&self.manifest).expect("serialisable")))?;
        written.push(path);
        Ok(written)
    }
}

struct Recorder {
    precision: BTreeMap<String, Value>,
    timing: BTreeMap<String, f64>,
}

impl Recorder {
    fn new() -> Self {
        Recorder {
            precision: BTreeMap::new(),
            timing: BTreeMap::new(),
        }
    }

    fn stage<T>(&mut self, name: &str, f: impl FnOnce() -> Result<T>) -> Result<T> {
        let t = Instant::now();
        let out = f();
        self.timing.insert(name.to_string(), t.elapsed().as_secs_f64());
        out
    }

    fn bits(&mut self, name: impl Into<String>, bits: u32) {
        self.precision.insert(name.into(), json!(bits));
    }

    fn exact(&mut self, name: impl Into<String>) {
        self.precision.insert(name.into(), json!("exact"));
    }
}

fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serialisable");
    s.push('\n');
    s
}

/// Exit code for an error: 2 for precision exhaustion, 3 for configuration
/// problems, 1 otherwise.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Precision { .. } => EXIT_PRECISION,
        Error::Parse(_) | Error::Parameter(_) | Error::Length { .. } | Error::Unsupported(_) => EXIT_CONFIG,
        _ => EXIT_FAILURE,
    }
}

fn object<'a>(config: &'a Value, ctx: &str) -> Result<&'a Map<String, Value>> {
    config
        .as_object()
        .ok_or_else(|| Error::Parse(format!("{ctx} config must be a JSON object")))
}

fn required<'a>(obj: &'a Map<String, Value>, key: &str) -> Result<&'a Value> {
    obj.get(key).ok_or_else(|| Error::Parse(format!("missing key {key:?}")))
}

fn usize_key(obj: &Map<String, Value>, key: &str) -> Result<Option<usize>> {
    match obj.get(key) {
        None => Ok(None),
        Some(v) => v
            .as_u64()
            .map(|n| Some(n as usize))
            .ok_or_else(|| Error::Parse(format!("{key:?} must be a non-negative integer"))),
    }
}

fn string_key<'a>(obj: &'a Map<String, Value>, key: &str) -> Result<Option<&'a str>> {
    match obj.get(key) {
        None => Ok(None),
        Some(v) => v
            .as_str()
            .map(Some)
            .ok_or_else(|| Error::Parse(format!("{key:?} must be a string"))),
    }
}

fn kernel_from(obj: &Map<String, Value>) -> Result<Kernel> {
    let family = SpectralFamily::from_json(required(obj, "kernel")?)?;
    let sigma2 = match obj.get("sigma2") {
        Some(v) => scalar_from_json(v)?,
        None => Scalar::one(),
    };
    Kernel::new(family, sigma2)
}

fn design_rule(obj: &Map<String, Value>) -> Result<DesignRule> {
    match string_key(obj, "design")? {
        None | Some("equispaced") => Ok(DesignRule::Equispaced),
        Some("nested") => Ok(DesignRule::Nested),
        Some(other) => Err(Error::Parse(format!("design must be equispaced or nested, got {other:?}"))),
    }
}

fn solve_options(ov: &Overrides) -> SolveOptions {
    SolveOptions {
        precision_start: ov.precision_start.unwrap_or(DEFAULT_PRECISION),
        precision_ceiling: ov.precision_ceiling.unwrap_or(PRECISION_CEILING),
    }
}

/// SHA-256 of the canonical (key-sorted, compact) form of a configuration.
pub fn config_hash(config: &Value) -> String {
    let canonical = serde_json::to_string(config).expect("serialisable");
    Sha256::digest(canonical.as_bytes())
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Run one command on a parsed configuration.
pub fn execute(command: &str, config: &Value, ov: &Overrides) -> Result<RunOutput> {
    let mut rec = Recorder::new();
    let files = match command {
        "variance-seq" => variance_seq(config, ov, &mut rec)?,
        "determinacy" => determinacy(config, &mut rec)?,
        "krige" => krige_cmd(config, ov, &mut rec)?,
        "membership" => membership(config, ov, &mut rec)?,
        "closed-form-check" => closed_form_check(config, ov, &mut rec)?,
        other => return Err(Error::Parse(format!("unknown command {other:?}"))),
    };
    Ok(RunOutput {
        manifest: RunManifest {
            command: command.to_string(),
            config_sha256: config_hash(config),
            library_version: env!("CARGO_PKG_VERSION").to_string(),
            precision_bits: rec.precision,
            wall_time_seconds: rec.timing,
            outputs: files.iter().map(|(n, _)| n.clone()).collect(),
        },
        files,
    })
}

fn variance_seq(config: &Value, ov: &Overrides, rec: &mut Recorder) -> Result<Vec<(String, String)>> {
    let obj = object(config, "variance-seq")?;
    reject_unknown(obj, &["family", "n_max", "n_max_cap", "path"], "variance-seq config")?;
    let family = SpectralFamily::from_json(required(obj, "family")?)?;
    let n_max = usize_key(obj, "n_max")?.ok_or_else(|| Error::Parse("missing key \"n_max\"".into()))?;
    let cap = usize_key(obj, "n_max_cap")?.unwrap_or(DEFAULT_N_MAX_CAP);
    if n_max > cap {
        return Err(Error::Parameter(format!("n_max = {n_max} exceeds the cap {cap}")));
    }
    let path = match string_key(obj, "path")? {
        None | Some("direct") => PathPreference::Direct,
        Some("analytic") => PathPreference::Analytic,
        Some(other) => return Err(Error::Parse(format!("path must be direct or analytic, got {other:?}"))),
    };
    let opts = HankelOptions {
        precision_start: ov.precision_start.unwrap_or(DEFAULT_PRECISION),
        precision_ceiling: ov.precision_ceiling.unwrap_or(PRECISION_CEILING),
        path,
    };
    let b = rec.stage("moments", || even_moments(&family, 2 * n_max))?;
    let report = rec.stage("variance", || blue_variance_seq_with(&b, n_max, &opts))?;
    match report.entries.iter().find_map(|e| e.variance.precision()) {
        Some(bits) => rec.bits("variance", bits),
        None => rec.exact("variance"),
    }
    let summary = json!({
        "family": family.to_json(),
        "n_max": n_max,
        "kind": report.kind(),
        "path": report.entries.last().map(|e| e.path.as_str()),
        "limit_flag": report.limit_flag,
        "extrapolated_limit": report.extrapolated_limit,
        "final_variance": report.entries.last().map(|e| e.variance.clone()),
    });
    Ok(vec![
        ("variance_seq.csv".into(), report.to_csv()),
        ("variance_seq.json".into(), pretty(&summary)),
    ])
}

fn determinacy(config: &Value, rec: &mut Recorder) -> Result<Vec<(String, String)>> {
    let obj = object(config, "determinacy")?;
    reject_unknown(obj, &["family", "n"], "determinacy config")?;
    let family = SpectralFamily::from_json(required(obj, "family")?)?;
    let n = usize_key(obj, "n")?.unwrap_or(DEFAULT_DETERMINACY_N);
    let b = rec.stage("moments", || even_moments(&family, n))?;
    let report = rec.stage("indicators", || determinacy_indicators(&b, n))?;
    rec.bits("carleman", DEFAULT_PRECISION);
    let mut doc = serde_json::to_value(&report).expect("serialisable");
    doc["family"] = family.to_json();
    doc["n"] = json!(n);
    Ok(vec![("determinacy.json".into(), pretty(&doc))])
}

fn krige_cmd(config: &Value, ov: &Overrides, rec: &mut Recorder) -> Result<Vec<(String, String)>> {
    let obj = object(config, "krige")?;
    reject_unknown(
        obj,
        &["kernel", "sigma2", "domain", "N", "function", "grid_size", "band_variant", "band_factor", "design"],
        "krige config",
    )?;
    let kernel = kernel_from(obj)?;
    let (a, b) = domain_from_json(required(obj, "domain")?)?;
    let n = usize_key(obj, "N")?.ok_or_else(|| Error::Parse("missing key \"N\"".into()))?;
    if n == 0 || n > DEFAULT_N_CAP {
        return Err(Error::Parameter(format!("N must be in 1..={DEFAULT_N_CAP}, got {n}")));
    }
    let f = TestFunction::from_json(required(obj, "function")?)?;
    let grid_size = usize_key(obj, "grid_size")?.unwrap_or(DEFAULT_GRID_SIZE);
    let variant = match (ov.band_variant, string_key(obj, "band_variant")?) {
        (Some(v), _) => v,
        (None, Some(s)) => s.parse()?,
        (None, None) => BandVariant::Paper,
    };
    let factor = match obj.get("band_factor") {
        Some(v) => scalar_from_json(v)?,
        None => Scalar::int(3),
    };
    let design = Design::generate(&a, &b, n, design_rule(obj)?)?;
    let grid = uniform_grid(&a, &b, grid_size)?;
    let fit = rec.stage("solve", || {
        fit_with(&kernel, &design, &Observations::Function(f.clone()), &solve_options(ov))
    })?;
    rec.bits("solve", fit.solve_precision);
    let cmp = rec.stage("bands", || Ok(compare_bands(&fit, &f, &grid, &factor, variant)))?;
    let n_sigma2 = &fit.sigma2_hat * &Scalar::int(n as i64);
    let summary = json!({
        "kernel": kernel.to_json(),
        "function": f.to_json(),
        "N": n,
        "band_variant": variant,
        "sigma2_hat": fit.sigma2_hat,
        "N_sigma2_hat": n_sigma2,
        "deviation_band_ratio": cmp.deviation_band_ratio,
        "mean_pointwise_ratio": cmp.mean_pointwise_ratio,
        "solve_precision": fit.solve_precision,
        "condition_estimate": fit.condition_estimate,
    });
    Ok(vec![
        ("krige.csv".into(), cmp.to_csv()),
        ("krige.json".into(), pretty(&summary)),
    ])
}

fn membership(config: &Value, ov: &Overrides, rec: &mut Recorder) -> Result<Vec<(String, String)>> {
    let obj = object(config, "membership")?;
    reject_unknown(
        obj,
        &["kernel", "sigma2", "domain", "N_schedule", "function", "design"],
        "membership config",
    )?;
    let kernel = kernel_from(obj)?;
    let (a, b) = domain_from_json(required(obj, "domain")?)?;
    let schedule: Vec<usize> = required(obj, "N_schedule")?
        .as_array()
        .ok_or_else(|| Error::Parse("\"N_schedule\" must be an array".into()))?
        .iter()
        .map(|v| {
            v.as_u64()
                .map(|n| n as usize)
                .ok_or_else(|| Error::Parse("\"N_schedule\" entries must be integers".into()))
        })
        .collect::<Result<_>>()?;
    if schedule.iter().any(|&n| n > DEFAULT_N_CAP) {
        return Err(Error::Parameter(format!("schedule entries must be <= {DEFAULT_N_CAP}")));
    }
    let f = TestFunction::from_json(required(obj, "function")?)?;
    let opts = MembershipOptions {
        rule: design_rule(obj)?,
        solve: solve_options(ov),
    };
    let diag = rec.stage("diagnostic", || membership_diagnostic_with(&kernel, &f, (&a, &b), &schedule, &opts))?;
    for e in &diag.entries {
        rec.bits(format!("solve_N{}", e.n), e.solve_precision);
    }
    let entries: Vec<Value> = diag
        .entries
        .iter()
        .map(|e| {
            json!({
                "N": e.n,
                "sigma2_hat": e.sigma2_hat,
                "N_sigma2_hat": e.n_sigma2_hat,
                "var_blue": e.var_blue,
                "N_sigma2_hat_decimal": e.n_sigma2_hat.to_f64(),
            })
        })
        .collect();
    let doc = json!({
        "kernel": kernel.to_json(),
        "function": f.to_json(),
        "entries": entries,
        "slope": diag.slope,
        "verdict": diag.verdict,
    });
    Ok(vec![("membership.json".into(), pretty(&doc))])
}

fn closed_form_check(config: &Value, ov: &Overrides, rec: &mut Recorder) -> Result<Vec<(String, String)>> {
    let obj = object(config, "closed-form-check")?;
    reject_unknown(obj, &["family", "n_max", "precision"], "closed-form-check config")?;
    let family = SpectralFamily::from_json(required(obj, "family")?)?;
    let n_max = usize_key(obj, "n_max")?.ok_or_else(|| Error::Parse("missing key \"n_max\"".into()))?;
    if n_max > DEFAULT_N_MAX_CAP {
        return Err(Error::Parameter(format!("n_max = {n_max} exceeds the cap {DEFAULT_N_MAX_CAP}")));
    }
    let prec = usize_key(obj, "precision")?.map(|p| p as u32).unwrap_or(CLOSED_FORM_PRECISION);
    closed_form_variance_at(&family, 1, prec)?;
    let opts = HankelOptions {
        precision_start: ov.precision_start.unwrap_or(DEFAULT_PRECISION),
        precision_ceiling: ov.precision_ceiling.unwrap_or(PRECISION_CEILING),
        ..HankelOptions::default()
    };
    let b = rec.stage("moments", || even_moments(&family, 2 * n_max))?;
    let report = rec.stage("direct", || blue_variance_seq_with(&b, n_max, &opts))?;
    let rows = rec.stage("closed_form", || {
        (1..=n_max)
            .map(|n| {
                let direct = &report.entries[n].variance;
                let closed = closed_form_variance_at(&family, n, prec)?;
                let product = match &family {
                    SpectralFamily::Gaussian { .. } => Some(gaussian_variance_by_recurrence(n)),
                    SpectralFamily::SymmetricBeta { alpha } => Some(beta_variance_by_canonical(alpha, n)?),
                    _ => None,
                };
                let residual = (direct - &closed).abs();
                let relative = if closed.is_zero() { residual.clone() } else { &residual / &closed.abs() };
                Ok(json!({
                    "n": n,
                    "direct": direct,
                    "closed_form": closed,
                    "product_formula": product,
                    "abs_residual": residual,
                    "rel_residual": relative.to_f64(),
                }))
            })
            .collect::<Result<Vec<Value>>>()
    })?;
    if report.kind() == crate::scalar::ScalarKind::Exact {
        rec.exact("direct");
    }
    rec.bits("closed_form", prec);
    let max_rel = rows
        .iter()
        .map(|r| r["rel_residual"].as_f64().unwrap_or(f64::NAN))
        .fold(0.0f64, f64::max);
    let all_exact_zero = rows.iter().all(|r| r["abs_residual"] == json!("0"));
    let doc = json!({
        "family": family.to_json(),
        "n_max": n_max,
        "precision_bits": prec,
        "rows": rows,
        "max_rel_residual": max_rel,
        "all_residuals_exactly_zero": all_exact_zero,
    });
    Ok(vec![("closed_form_check.json".into(), pretty(&doc))])
}

/// Parse command-line arguments, run the command, write outputs and return
/// the process exit code.
pub fn run(cli: Cli) -> i32 {
    let name = cli.command.name();
    let config = match load_config(&cli) {
        Ok(c) => c,
        Err(err) => {
            eprintln!("rkhs-probe {name}: {err}");
            return EXIT_CONFIG;
        }
    };
    let band_variant = match cli.global.band_variant.as_deref().map(str::parse).transpose() {
        Ok(v) => v,
        Err(err) => {
            eprintln!("rkhs-probe {name}: {err}");
            return EXIT_CONFIG;
        }
    };
    let ov = Overrides {
        precision_start: cli.global.precision_start,
        precision_ceiling: cli.global.precision_ceiling,
        band_variant,
    };
    match execute(name, &config, &ov) {
        Ok(out) => match out.write_to(&cli.global.out) {
            Ok(paths) => {
                for p in paths {
                    println!("{}", p.display());
                }
                EXIT_OK
            }
            Err(err) => {
                eprintln!("rkhs-probe {name}: cannot write outputs: {err}");
                EXIT_FAILURE
            }
        },
        Err(err) => {
            eprintln!("rkhs-probe {name}: {err}");
            exit_code(&err)
        }
    }
}

fn load_config(cli: &Cli) -> Result<Value> {
    let mut config = match &cli.global.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| Error::Parse(format!("cannot read {}: {e}", path.display())))?;
            serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?
        }
        None => Value::Object(Map::new()),
    };
    if let Command::VarianceSeq { family, n_max } = &cli.command {
        let obj = config
            .as_object_mut()
            .ok_or_else(|| Error::Parse("config must be a JSON object".into()))?;
        if let Some(f) = family {
            let v: Value = serde_json::from_str(f).map_err(|e| Error::Parse(format!("--family: {e}")))?;
            obj.insert("family".into(), v);
        }
        if let Some(n) = n_max {
            obj.insert("n_max".into(), json!(n));
        }
    }
    if cli.global.config.is_none() && !matches!(cli.command, Command::VarianceSeq { .. }) {
        return Err(Error::Parse(format!("{} needs --config", cli.command.name())));
    }
    Ok(config)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gaussian() -> Value {
        json!({"family": "gaussian", "params": {"lambda": 1}})
    }

    #[test]
    fn variance_seq_rows() {
        let out = execute("variance-seq", &json!({"family": gaussian(), "n_max": 4}), &Overrides::default()).unwrap();
        let csv = out.file("variance_seq.csv").unwrap();
        let vars: Vec<String> = csv
            .lines()
            .skip(2)
            .map(|l| {
                let c: Vec<&str> = l.split(',').collect();
                format!("{}/{}", c[1], c[2])
            })
            .collect();
        assert_eq!(vars, ["2/3", "8/15", "16/35", "128/315"]);
        assert_eq!(out.manifest.outputs, ["variance_seq.csv", "variance_seq.json"]);
    }

    #[test]
    fn unknown_keys_are_config_errors() {
        let err = execute("variance-seq", &json!({"family": gaussian(), "n_max": 4, "nmax": 3}), &Overrides::default())
            .unwrap_err();
        assert_eq!(exit_code(&err), EXIT_CONFIG);
        let err = execute("variance-seq", &json!({"family": gaussian(), "n_max": 65}), &Overrides::default()).unwrap_err();
        assert_eq!(exit_code(&err), EXIT_CONFIG);
        let err = execute("closed-form-check", &json!({"family": {"family": "cosine", "params": {"lambda": 1}}, "n_max": 3}), &Overrides::default()).unwrap_err();
        assert_eq!(exit_code(&err), EXIT_CONFIG);
    }

    #[test]
    fn hash_is_stable() {
        let a = config_hash(&json!({"a": 1, "b": [1, 2]}));
        assert_eq!(a.len(), 64);
        assert_eq!(a, config_hash(&json!({"b": [1, 2], "a": 1})));
        assert_ne!(a, config_hash(&json!({"a": 2, "b": [1, 2]})));
    }

    #[test]
    fn precision_errors_map_to_two() {
        let err = Error::Precision {
            ceiling: 64,
            previous: "1".into(),
            current: "2".into(),
        };
        assert_eq!(exit_code(&err), EXIT_PRECISION);
        assert_eq!(exit_code(&Error::Singular { family: "cosine".into() }), EXIT_FAILURE);
    }
}
