//! Command-line front end: `analyze`, `simulate`, `scenarios` and `report`.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::aft::{aft_fit, AftFamily, AftFit};
use crate::cox::{cox_fit, grambsch_therneau_test, schoenfeld_global_test, CoxFit, PhTestResult, TimeTransform};
use crate::error::NphError;
use crate::logrank::{maxcombo_with, weighted_logrank, ComboCorrelation, FhWeight, MaxComboOptions};
use crate::metrics::{build_report, ScenarioReport};
use crate::rmst::rmst_difference_test;
use crate::sim::{builtin_scenario, builtin_scenarios, run_plan, Method, Replication, ReplicationPlan, Scenario};
use crate::survival::{Arm, SurvivalDataset};

pub const EXIT_OK: i32 = 0;
/// Bad flags, unreadable or malformed input, unknown scenario.
pub const EXIT_INPUT: i32 = 2;
/// A statistic or model could not be computed.
pub const EXIT_COMPUTATION: i32 = 3;
/// Output could not be written.
pub const EXIT_OUTPUT: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "nphkit", version, about = "Survival analysis and trial simulation under non-proportional hazards")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run every test, both PH diagnostics and the Cox/GG/GF fits on one IPD CSV.
    Analyze(AnalyzeArgs),
    /// Simulate a scenario and summarize power and bias.
    Simulate(SimulateArgs),
    /// Print the builtin scenario parameterizations.
    Scenarios(ScenariosArgs),
    /// Rebuild a report from replications saved by `simulate --raw`.
    Report(ReportArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CovarianceMode {
    Estimated,
    Identity,
}

impl From<CovarianceMode> for ComboCorrelation {
    fn from(m: CovarianceMode) -> Self {
        match m {
            CovarianceMode::Estimated => ComboCorrelation::Estimated,
            CovarianceMode::Identity => ComboCorrelation::Identity,
        }
    }
}

#[derive(Debug, Args)]
pub struct OutputArgs {
    /// Output file; standard output when omitted.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
    /// Write tidy CSV instead of JSON.
    #[arg(long)]
    pub csv: bool,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// CSV with columns time, event, arm.
    pub input: PathBuf,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long, value_enum, default_value_t = CovarianceMode::Estimated)]
    pub maxcombo_cov: CovarianceMode,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Builtin scenario name or path to a scenario JSON file.
    #[arg(long)]
    pub scenario: String,
    #[arg(long, default_value_t = 2000)]
    pub reps: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Comma-separated subset of logrank, maxcombo, rmst_diff, gg, gf.
    #[arg(long, value_delimiter = ',')]
    pub methods: Option<Vec<String>>,
    /// Overrides the scenario's significance level.
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long, value_enum, default_value_t = CovarianceMode::Estimated)]
    pub maxcombo_cov: CovarianceMode,
    /// Skip the model fits behind the bias curves.
    #[arg(long)]
    pub no_bias: bool,
    /// Worker threads; defaults to the available parallelism.
    #[arg(long, env = "NPHKIT_WORKERS")]
    pub workers: Option<usize>,
    /// Also save the per-replication results as JSON.
    #[arg(long)]
    pub raw: Option<PathBuf>,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Args)]
pub struct ScenariosArgs {
    /// Print JSON instead of a table.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// File written by `simulate --raw`.
    pub input: PathBuf,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[command(flatten)]
    pub out: OutputArgs,
}

/// Error carrying the exit code it maps to.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn input(message: impl Into<String>) -> Self {
        CliError { code: EXIT_INPUT, message: message.into() }
    }

    fn output(path: &Path, e: impl std::fmt::Display) -> Self {
        CliError { code: EXIT_OUTPUT, message: format!("cannot write {}: {e}", path.display()) }
    }
}

impl From<NphError> for CliError {
    fn from(e: NphError) -> Self {
        let code = match e {
            NphError::Degenerate(_) | NphError::NonConvergence { .. } => EXIT_COMPUTATION,
            _ => EXIT_INPUT,
        };
        CliError { code, message: e.to_string() }
    }
}

/// Parses `args` (including the program name), runs the command and returns
/// the exit code. Errors are reported on standard error.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
        }
    };
    match execute(cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code
        }
    }
}

pub fn execute(command: Command) -> Result<(), CliError> {
    match command {
        Command::Analyze(a) => cmd_analyze(&a),
        Command::Simulate(a) => cmd_simulate(&a),
        Command::Scenarios(a) => cmd_scenarios(&a),
        Command::Report(a) => cmd_report(&a),
    }
}

fn check_alpha(alpha: f64) -> Result<f64, CliError> {
    if alpha > 0.0 && alpha <= 0.5 {
        Ok(alpha)
    } else {
        Err(CliError::input(format!("alpha must lie in (0, 0.5], got {alpha}")))
    }
}

fn emit(
    out: &OutputArgs,
    json: impl FnOnce() -> Result<String, NphError>,
    csv: impl FnOnce(&mut dyn Write) -> Result<(), NphError>,
) -> Result<(), CliError> {
    let mut buf = Vec::new();
    if out.csv {
        csv(&mut buf)?;
    } else {
        buf = json()?.into_bytes();
        buf.push(b'\n');
    }
    match &out.output {
        Some(path) => fs::write(path, &buf).map_err(|e| CliError::output(path, e)),
        None => io::stdout().write_all(&buf).map_err(|e| CliError::output(Path::new("<stdout>"), e)),
    }
}

// ---- analyze ----

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestRow {
    pub name: String,
    pub statistic: Option<f64>,
    pub p_value: Option<f64>,
    pub reject: Option<bool>,
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefRow {
    pub parameter: String,
    pub estimate: f64,
    pub se: Option<f64>,
}

/// Treatment effect in the table convention: HR = e^β for Cox, AF = e^{−β}
/// for the AFT models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectSummary {
    pub beta: f64,
    pub se: Option<f64>,
    /// `"hr"` or `"af"`.
    pub ratio_kind: String,
    pub ratio: f64,
    pub ratio_ci: Option<[f64; 2]>,
    pub p_value: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelTable {
    pub model: String,
    pub converged: bool,
    pub failure: Option<String>,
    pub loglik: Option<f64>,
    pub effect: Option<EffectSummary>,
    pub coefficients: Vec<CoefRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub input: String,
    pub n: [usize; 2],
    pub events: [usize; 2],
    pub alpha: f64,
    pub tests: Vec<TestRow>,
    pub ph_diagnostics: Vec<TestRow>,
    pub models: Vec<ModelTable>,
}

const Z975: f64 = 1.959963984540054;

fn effect(beta: f64, se: Option<f64>, sign: f64, kind: &str, p: Option<f64>) -> EffectSummary {
    let ratio = (sign * beta).exp();
    let ci = se.filter(|s| s.is_finite()).map(|s| {
        let (a, b) = ((sign * (beta - Z975 * s)).exp(), (sign * (beta + Z975 * s)).exp());
        [a.min(b), a.max(b)]
    });
    EffectSummary { beta, se, ratio_kind: kind.into(), ratio, ratio_ci: ci, p_value: p }
}

fn cox_table(fit: &Result<CoxFit, NphError>) -> ModelTable {
    match fit {
        Ok(f) => {
            let se = f.se_beta();
            ModelTable {
                model: "cox".into(),
                converged: f.converged,
                failure: (!f.converged).then(|| "did not converge".into()),
                loglik: Some(f.loglik),
                effect: Some(effect(f.beta, Some(se), 1.0, "hr", Some(f.wald_p()))),
                coefficients: vec![CoefRow { parameter: "beta1".into(), estimate: f.beta, se: Some(se) }],
            }
        }
        Err(e) => failed_table("cox", e.to_string()),
    }
}

fn failed_table(model: &str, reason: String) -> ModelTable {
    ModelTable {
        model: model.into(),
        converged: false,
        failure: Some(reason),
        loglik: None,
        effect: None,
        coefficients: vec![],
    }
}

fn aft_table(family: AftFamily, fit: &Result<AftFit, NphError>) -> ModelTable {
    let f = match fit {
        Ok(f) => f,
        Err(e) => return failed_table(family.name(), e.to_string()),
    };
    let se_of = |name: &str| {
        let cov = f.covariance.as_ref()?;
        let k = f.covariance_params.iter().position(|p| p == name)?;
        Some(cov[k][k].sqrt())
    };
    let failure = if f.shape_diverged {
        Some("shape estimates diverge".to_string())
    } else if !f.converged {
        Some(format!("did not converge (max |gradient| {:.3e})", f.gradient_max))
    } else if f.covariance.is_none() {
        Some("observed information is not positive definite".into())
    } else {
        None
    };
    ModelTable {
        model: family.name().into(),
        converged: f.converged,
        failure,
        loglik: Some(f.loglik),
        effect: Some(effect(f.beta1, f.se_beta1(), -1.0, "af", f.wald.map(|w| w.p))),
        coefficients: f
            .param_names
            .iter()
            .zip(&f.theta)
            .map(|(name, &v)| CoefRow { parameter: name.clone(), estimate: v, se: se_of(name) })
            .collect(),
    }
}

fn test_row(name: &str, alpha: f64, r: Result<(f64, f64), NphError>) -> TestRow {
    match r {
        Ok((stat, p)) => TestRow {
            name: name.into(),
            statistic: Some(stat),
            p_value: Some(p),
            reject: Some(p < alpha),
            failure: None,
        },
        Err(e) => {
            TestRow { name: name.into(), statistic: None, p_value: None, reject: None, failure: Some(e.to_string()) }
        }
    }
}

/// Runs the full battery on one dataset. Fails only when the dataset itself
/// cannot be analyzed; per-model problems are reported in the tables.
pub fn analyze_dataset(
    data: &SurvivalDataset,
    alpha: f64,
    cov: ComboCorrelation,
    input: &str,
) -> Result<AnalysisReport, NphError> {
    data.require_two_arms()?;
    if [Arm::Control, Arm::Treatment].iter().any(|&a| data.count_arm(a) < 2) {
        return Err(NphError::Degenerate("each arm needs at least 2 subjects".into()));
    }
    if data.n_events() == 0 {
        return Err(NphError::Degenerate("no events observed".into()));
    }
    let opts = MaxComboOptions { correlation: cov, ..Default::default() };
    let cox = cox_fit(data);
    let gg = aft_fit(data, AftFamily::Gg);
    let gf = aft_fit(data, AftFamily::Gf);
    let wald = |fit: &Result<AftFit, NphError>| match fit {
        Ok(f) if f.is_usable() => Ok(f.wald.map(|w| (w.statistic, w.p)).unwrap()),
        Ok(f) => Err(NphError::NonConvergence {
            model: f.family.name().into(),
            reason: aft_table(f.family, fit).failure.unwrap_or_default(),
        }),
        Err(e) => Err(e.clone()),
    };
    let tests = vec![
        test_row("logrank", alpha, weighted_logrank(data, FhWeight::LOGRANK).map(|r| (r.z, r.p_two_sided))),
        test_row("maxcombo", alpha, maxcombo_with(data, opts).map(|r| (r.z_max, r.p_two_sided))),
        test_row("rmst_diff", alpha, rmst_difference_test(data).map(|r| (r.z, r.p_two_sided))),
        test_row("gg", alpha, wald(&gg)),
        test_row("gf", alpha, wald(&gf)),
    ];
    let ph = |name: &str, r: Result<PhTestResult, NphError>| test_row(name, alpha, r.map(|t| (t.statistic, t.p)));
    let ph_diagnostics = match &cox {
        Ok(fit) => vec![
            ph("grambsch_therneau", grambsch_therneau_test(fit, data, TimeTransform::Km)),
            ph("schoenfeld_global", schoenfeld_global_test(fit, data)),
        ],
        Err(e) => vec![ph("grambsch_therneau", Err(e.clone())), ph("schoenfeld_global", Err(e.clone()))],
    };
    let events = |arm| data.records().iter().filter(|r| r.arm == arm && r.event).count();
    Ok(AnalysisReport {
        input: input.into(),
        n: [data.count_arm(Arm::Control), data.count_arm(Arm::Treatment)],
        events: [events(Arm::Control), events(Arm::Treatment)],
        alpha,
        tests,
        ph_diagnostics,
        models: vec![cox_table(&cox), aft_table(AftFamily::Gg, &gg), aft_table(AftFamily::Gf, &gf)],
    })
}

impl AnalysisReport {
    pub fn to_json(&self) -> Result<String, NphError> {
        serde_json::to_string_pretty(self).map_err(|e| NphError::Io(e.to_string()))
    }

    /// Tidy rows `section, name, quantity, value`.
    pub fn write_tidy_csv(&self, out: &mut dyn Write) -> Result<(), NphError> {
        let mut w = csv::Writer::from_writer(out);
        let io = |e: csv::Error| NphError::Io(e.to_string());
        w.write_record(["section", "name", "quantity", "value"]).map_err(io)?;
        let mut put =
            |s: &str, n: &str, q: &str, v: Option<f64>| v.map_or(Ok(()), |v| w.write_record([s, n, q, &v.to_string()]));
        for (section, rows) in [("test", &self.tests), ("ph", &self.ph_diagnostics)] {
            for r in rows {
                put(section, &r.name, "statistic", r.statistic).map_err(io)?;
                put(section, &r.name, "p_value", r.p_value).map_err(io)?;
            }
        }
        for m in &self.models {
            put("model", &m.model, "loglik", m.loglik).map_err(io)?;
            if let Some(e) = &m.effect {
                put("model", &m.model, &e.ratio_kind, Some(e.ratio)).map_err(io)?;
                if let Some([lo, hi]) = e.ratio_ci {
                    put("model", &m.model, &format!("{}_lower95", e.ratio_kind), Some(lo)).map_err(io)?;
                    put("model", &m.model, &format!("{}_upper95", e.ratio_kind), Some(hi)).map_err(io)?;
                }
            }
            for c in &m.coefficients {
                put("model", &m.model, &c.parameter, Some(c.estimate)).map_err(io)?;
                put("model", &m.model, &format!("se_{}", c.parameter), c.se).map_err(io)?;
            }
        }
        w.flush().map_err(NphError::from)
    }
}

fn cmd_analyze(a: &AnalyzeArgs) -> Result<(), CliError> {
    let alpha = check_alpha(a.alpha)?;
    let data = SurvivalDataset::read_csv(&a.input)?;
    let report = analyze_dataset(&data, alpha, a.maxcombo_cov.into(), &a.input.display().to_string())?;
    for m in report.models.iter().filter(|m| m.failure.is_some()) {
        eprintln!("warning: {}: {}", m.model, m.failure.as_deref().unwrap_or_default());
    }
    emit(&a.out, || report.to_json(), |w| report.write_tidy_csv(w))
}

// ---- simulate / report ----

/// Everything needed to rebuild a report without rerunning the simulation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawRun {
    pub plan: ReplicationPlan,
    pub replications: Vec<Replication>,
}

/// A builtin name, or a path to a scenario JSON file.
pub fn resolve_scenario(spec: &str) -> Result<Scenario, NphError> {
    let path = Path::new(spec);
    if spec.ends_with(".json") || path.is_file() {
        let text = fs::read_to_string(path).map_err(|e| NphError::Io(format!("{}: {e}", path.display())))?;
        Scenario::from_json(&text)
    } else {
        builtin_scenario(spec)
    }
}

pub fn parse_methods(list: Option<&[String]>) -> Result<Vec<Method>, NphError> {
    let Some(list) = list else { return Ok(Method::ALL.to_vec()) };
    let mut out = Vec::new();
    for item in list {
        if item.trim().eq_ignore_ascii_case("all") {
            out.extend(Method::ALL);
        } else {
            out.push(item.parse()?);
        }
    }
    out.sort();
    out.dedup();
    Ok(out)
}

pub fn simulation_plan(a: &SimulateArgs) -> Result<ReplicationPlan, CliError> {
    let mut scenario = resolve_scenario(&a.scenario)?;
    if let Some(alpha) = a.alpha {
        scenario.alpha = check_alpha(alpha)?;
    }
    if a.reps == 0 {
        return Err(CliError::input("--reps must be at least 1"));
    }
    let mut plan = ReplicationPlan::new(scenario, a.reps, a.seed);
    plan.methods = parse_methods(a.methods.as_deref())?;
    plan.collect_estimates = !a.no_bias;
    plan.maxcombo.correlation = a.maxcombo_cov.into();
    plan.validate()?;
    Ok(plan)
}

fn cmd_simulate(a: &SimulateArgs) -> Result<(), CliError> {
    let plan = simulation_plan(a)?;
    if a.workers == Some(0) {
        return Err(CliError::input("worker count must be at least 1"));
    }
    for path in a.out.output.iter().chain(&a.raw) {
        fs::File::create(path).map_err(|e| CliError::output(path, e))?;
    }
    let reps = run_plan(&plan, a.workers)?;
    let report = build_report(&plan, &reps)?;
    if let Some(path) = &a.raw {
        let raw = RawRun { plan, replications: reps };
        let text = serde_json::to_string(&raw).map_err(|e| CliError::output(path, e))?;
        fs::write(path, text).map_err(|e| CliError::output(path, e))?;
    }
    write_report(&report, &a.out)
}

fn write_report(report: &ScenarioReport, out: &OutputArgs) -> Result<(), CliError> {
    // The table goes to stderr when stdout carries the report itself.
    if out.output.is_some() {
        print!("{}", report.power_table());
    } else {
        eprint!("{}", report.power_table());
    }
    emit(out, || report.to_json(), |w| report.write_tidy_csv(w))
}

fn cmd_report(a: &ReportArgs) -> Result<(), CliError> {
    let text = fs::read_to_string(&a.input).map_err(|e| CliError::input(format!("{}: {e}", a.input.display())))?;
    let mut raw: RawRun =
        serde_json::from_str(&text).map_err(|e| CliError::input(format!("{}: {e}", a.input.display())))?;
    if let Some(alpha) = a.alpha {
        raw.plan.scenario.alpha = check_alpha(alpha)?;
    }
    let report = build_report(&raw.plan, &raw.replications)?;
    write_report(&report, &a.out)
}

// ---- scenarios ----

pub fn scenarios_table(list: &[Scenario]) -> String {
    let mut s = String::new();
    for sc in list {
        s.push_str(&format!(
            "{}: n = {}/{}, follow-up {}, random censoring rate {}, alpha {}\n",
            sc.name, sc.n0, sc.n1, sc.followup, sc.random_censor_rate, sc.alpha
        ));
        for (label, arm) in [("control", &sc.arm0), ("treatment", &sc.arm1)] {
            let pieces: Vec<String> = arm
                .intervals()
                .map(|(a, b, r)| if b.is_finite() { format!("[{a}, {b}): {r}") } else { format!("[{a}, inf): {r}") })
                .collect();
            s.push_str(&format!("  {label:<9} {}\n", pieces.join("  ")));
        }
    }
    s
}

fn cmd_scenarios(a: &ScenariosArgs) -> Result<(), CliError> {
    let list = builtin_scenarios();
    let text = if a.json {
        serde_json::to_string_pretty(&list).map_err(|e| CliError::output(Path::new("<stdout>"), e))? + "\n"
    } else {
        scenarios_table(&list)
    };
    io::stdout().write_all(text.as_bytes()).map_err(|e| CliError::output(Path::new("<stdout>"), e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn error_codes_split_input_and_computation() {
        assert_eq!(CliError::from(NphError::EmptyDataset).code, EXIT_INPUT);
        assert_eq!(CliError::from(NphError::Csv { line: 3, reason: "x".into() }).code, EXIT_INPUT);
        assert_eq!(CliError::from(NphError::UnknownScenario("x".into())).code, EXIT_INPUT);
        assert_eq!(CliError::from(NphError::Degenerate("x".into())).code, EXIT_COMPUTATION);
        let nc = NphError::NonConvergence { model: "cox".into(), reason: "x".into() };
        assert_eq!(CliError::from(nc).code, EXIT_COMPUTATION);
    }

    #[test]
    fn method_lists() {
        assert_eq!(parse_methods(None).unwrap(), Method::ALL.to_vec());
        let m = parse_methods(Some(&["gf".into(), "logrank".into(), "rmst".into(), "gf".into()])).unwrap();
        assert_eq!(m, vec![Method::Logrank, Method::RmstDiff, Method::Gf]);
        assert!(parse_methods(Some(&["wilcoxon".into()])).is_err());
    }

    #[test]
    fn alpha_range() {
        assert!(check_alpha(0.5).is_ok());
        assert!(check_alpha(0.0).is_err());
        assert!(check_alpha(0.51).is_err());
    }

    #[test]
    fn effect_conventions() {
        let hr = effect(-0.3, Some(0.1), 1.0, "hr", None);
        assert!((hr.ratio - (-0.3f64).exp()).abs() < 1e-15);
        let af = effect(0.3, Some(0.1), -1.0, "af", None);
        assert!((af.ratio - (-0.3f64).exp()).abs() < 1e-15);
        let [lo, hi] = af.ratio_ci.unwrap();
        assert!(lo < af.ratio && af.ratio < hi);
    }

    #[test]
    fn scenario_table_lists_every_builtin() {
        let t = scenarios_table(&builtin_scenarios());
        for name in crate::sim::BUILTIN_NAMES {
            assert!(t.to_lowercase().replace('-', "").contains(name), "{name}");
        }
    }
}
