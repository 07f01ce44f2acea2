use std::path::{Path, PathBuf};
use std::process::ExitCode;

use aerisk_cli::meta_report::{run_meta, MetaRequest, Model};
use aerisk_cli::output::emit;
use aerisk_cli::report::{self, Selection};
use aerisk_cli::schema::read_all;
use aerisk_cli::{analyze, AnalyzeOptions, CliError};
use aerisk_core::bootstrap::DEFAULT_REPLICATES;
use aerisk_core::categories::categorize;
use aerisk_core::meta::{MetaOptions, Tau2Method};
use aerisk_core::simulator::SimulationPlan;
use aerisk_core::trial_data::{parse_patient_csv, write_patient_csv};
use aerisk_core::{Arm, CeScope, Estimator, QuantileSpec};
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "aerisk", version, about = "Adverse-event risk estimators and their meta-analysis")]
struct Cli {
    /// Worker threads; 1 runs everything serially, 0 uses all cores.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Per-trial analysis of a patient-level CSV into an aggregate JSON file.
    Analyze(AnalyzeArgs),
    /// Random-effects meta-analysis or meta-regression of aggregate files.
    Meta(MetaArgs),
    /// Simulate patient-level trial data.
    Simulate(SimulateArgs),
    /// Assign AE frequency categories.
    Categorize(CategorizeArgs),
    /// Figures and tables from aggregate files.
    Report(ReportArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum TauArg {
    Max,
    Q100,
    Q90,
    Q60,
    Q30,
}

impl From<TauArg> for QuantileSpec {
    fn from(t: TauArg) -> Self {
        match t {
            TauArg::Max => QuantileSpec::MaxFollowUp,
            TauArg::Q100 => QuantileSpec::Q100,
            TauArg::Q90 => QuantileSpec::Q90,
            TauArg::Q60 => QuantileSpec::Q60,
            TauArg::Q30 => QuantileSpec::Q30,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ScopeArg {
    All,
    DeathOnly,
}

#[derive(Clone, Copy, ValueEnum)]
#[value(rename_all = "UPPER")]
enum ArmArg {
    E,
    C,
}

impl From<ArmArg> for Arm {
    fn from(a: ArmArg) -> Self {
        match a {
            ArmArg::E => Arm::E,
            ArmArg::C => Arm::C,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Tau2Arg {
    Dl,
    Reml,
}

#[derive(Clone, Copy, ValueEnum)]
#[value(rename_all = "snake_case")]
enum ReportKind {
    RatioBoxplot,
    RatioDensity,
    Frequencies,
    Crosstab,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Svg,
    Csv,
    Text,
}

fn parse_estimator(s: &str) -> Result<Estimator, String> {
    Estimator::parse(s).ok_or_else(|| {
        format!("unknown estimator `{s}` (ip, pt_id_ignore_ce, one_minus_km, pt_id_account_ce, aje_death_only, aje_gold)")
    })
}

#[derive(Args)]
struct SelectArgs {
    /// Evaluation time to select.
    #[arg(long, value_enum, default_value = "max")]
    tau: TauArg,
    /// Restrict to one arm; both arms by default.
    #[arg(long, value_enum, ignore_case = true)]
    arm: Option<ArmArg>,
}

impl SelectArgs {
    fn selection(&self) -> Selection {
        Selection {
            tau: self.tau.into(),
            arm: self.arm.map(Arm::from),
        }
    }
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Patient-level CSV.
    input: PathBuf,
    /// Evaluation time; repeat for several.
    #[arg(long, value_enum, default_values = ["max"])]
    tau: Vec<TauArg>,
    #[arg(long, value_enum, default_value = "all")]
    ce_scope: ScopeArg,
    /// Bootstrap replicates.
    #[arg(long, default_value_t = DEFAULT_REPLICATES)]
    bootstrap: usize,
    #[arg(long, env = "AERISK_SEED", default_value_t = 1)]
    seed: u64,
    /// Output JSON; stdout if omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct MetaArgs {
    /// Aggregate JSON files.
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    /// pooled, univariable:<covariate>, multivariable or table.
    #[arg(long, default_value = "pooled")]
    model: Model,
    #[arg(long, value_enum, default_value = "dl")]
    tau2: Tau2Arg,
    /// Estimators to pool; all five comparisons by default.
    #[arg(long = "estimator", value_parser = parse_estimator)]
    estimators: Vec<Estimator>,
    #[command(flatten)]
    select: SelectArgs,
    /// CSV output; the text table is written next to it with a .txt extension.
    /// The text table goes to stdout if omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    /// TOML or JSON simulation plan; the built-in plan if omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override the plan's seed.
    #[arg(long, env = "AERISK_SEED")]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CategorizeArgs {
    /// Aggregate JSON files.
    inputs: Vec<PathBuf>,
    /// Categorize a single probability instead.
    #[arg(long, conflicts_with = "inputs")]
    value: Option<f64>,
    #[command(flatten)]
    select: SelectArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ReportArgs {
    /// Aggregate JSON files.
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    #[arg(long, value_enum)]
    kind: ReportKind,
    /// Output format; by default taken from the extension of --out.
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Comparison estimator for the crosstab.
    #[arg(long, value_parser = parse_estimator, default_value = "one_minus_km")]
    estimator: Estimator,
    /// Reference estimator for the crosstab.
    #[arg(long, value_parser = parse_estimator, default_value = "aje_gold")]
    reference: Estimator,
    #[command(flatten)]
    select: SelectArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn cmd_analyze(a: AnalyzeArgs, parallel: bool) -> Result<(), CliError> {
    let datasets = parse_patient_csv::<f64>(&a.input).map_err(|e| CliError::from(e).context(&a.input.display().to_string()))?;
    if datasets.is_empty() {
        return Err(CliError::input(format!("{}: no records", a.input.display())));
    }
    let opts = AnalyzeOptions {
        taus: a.tau.into_iter().map(QuantileSpec::from).collect(),
        ce_scope: match a.ce_scope {
            ScopeArg::All => CeScope::AllCe,
            ScopeArg::DeathOnly => CeScope::DeathOnly,
        },
        bootstrap: a.bootstrap,
        seed: a.seed,
        parallel,
    };
    let file = analyze(&datasets, &opts)?;
    emit(a.out.as_deref(), &file.to_json())
}

fn cmd_meta(a: MetaArgs) -> Result<(), CliError> {
    let files = read_all(&a.inputs)?;
    let req = MetaRequest {
        model: a.model,
        estimators: if a.estimators.is_empty() {
            Estimator::COMPARISONS.to_vec()
        } else {
            a.estimators
        },
        tau: a.select.tau.into(),
        arm: a.select.arm.map(Arm::from),
        options: MetaOptions {
            tau2: match a.tau2 {
                Tau2Arg::Dl => Tau2Method::DerSimonianLaird,
                Tau2Arg::Reml => Tau2Method::Reml,
            },
            ..MetaOptions::default()
        },
    };
    let report = run_meta(&files, &req)?;
    match a.out {
        Some(p) => {
            emit(Some(&p), &report.to_csv())?;
            emit(Some(&p.with_extension("txt")), &report.to_text())
        }
        None => emit(None, &report.to_text()),
    }
}

fn read_plan(path: &Path) -> Result<SimulationPlan, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    let plan = if path.extension().is_some_and(|e| e == "json") {
        serde_json::from_str(&text).map_err(|e| e.to_string())
    } else {
        toml::from_str(&text).map_err(|e| e.to_string())
    };
    plan.map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

fn cmd_simulate(a: SimulateArgs) -> Result<(), CliError> {
    let mut plan = match &a.config {
        Some(p) => read_plan(p)?,
        None => SimulationPlan::default(),
    };
    if let Some(seed) = a.seed {
        plan.seed = seed;
    }
    let datasets = plan.simulate::<f64>()?;
    let mut buf = Vec::new();
    write_patient_csv(&datasets, &mut buf)?;
    emit(a.out.as_deref(), &String::from_utf8(buf).expect("csv is utf-8"))
}

fn cmd_categorize(a: CategorizeArgs) -> Result<(), CliError> {
    if let Some(p) = a.value {
        let c = categorize(p)?;
        return emit(a.out.as_deref(), &format!("{}\n", c.id()));
    }
    let files = read_all(&a.inputs)?;
    let sel = a.select.selection();
    let estimators: Vec<Estimator> = Estimator::COMPARISONS.into_iter().chain([Estimator::AalenJohansen]).collect();
    let mut s = String::from("trial_id,ae_type,arm,estimator,probability,category\n");
    for f in &files {
        for u in f.units.iter().filter(|u| u.tau_spec == sel.tau) {
            for arm in u.arms.iter().filter(|x| sel.arm.is_none_or(|w| w == x.arm)) {
                for &e in &estimators {
                    let p = arm.estimates.get(e);
                    s.push_str(&format!(
                        "{},{},{},{},{},{}\n",
                        u.trial_id,
                        u.ae_type,
                        arm.arm,
                        e,
                        p,
                        categorize(p)?.id()
                    ));
                }
            }
        }
    }
    emit(a.out.as_deref(), &s)
}

fn cmd_report(a: ReportArgs) -> Result<(), CliError> {
    let files = read_all(&a.inputs)?;
    let sel = a.select.selection();
    let from_ext = a.out.as_ref().and_then(|p| p.extension()).and_then(|e| match e.to_str() {
        Some("svg") => Some(Format::Svg),
        Some("csv") => Some(Format::Csv),
        Some("txt") => Some(Format::Text),
        _ => None,
    });
    let format = a.format.or(from_ext);
    let text = match (a.kind, format) {
        (ReportKind::RatioBoxplot, None | Some(Format::Svg)) => report::boxplot_svg(&files, &sel)?,
        (ReportKind::RatioBoxplot, Some(Format::Csv)) => report::boxplot_csv(&files, &sel)?,
        (ReportKind::RatioDensity, None | Some(Format::Svg)) => report::density_svg(&files, &sel)?,
        (ReportKind::RatioDensity, Some(Format::Csv)) => report::density_csv(&files, &sel)?,
        (ReportKind::Frequencies, None | Some(Format::Csv)) => report::frequencies_csv(&files, &sel)?,
        (ReportKind::Crosstab, None | Some(Format::Csv)) => {
            report::category_crosstab(&files, &sel, a.estimator, a.reference)?.to_csv()
        }
        (ReportKind::Crosstab, Some(Format::Text)) => {
            report::category_crosstab(&files, &sel, a.estimator, a.reference)?.to_text_table()
        }
        _ => return Err(CliError::input("this report kind does not support the requested format")),
    };
    emit(a.out.as_deref(), &text)
}

fn run(cli: Cli) -> Result<(), CliError> {
    if cli.threads > 1 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global()
            .map_err(|e| CliError::input(e.to_string()))?;
    }
    let parallel = cli.threads != 1;
    match cli.command {
        Command::Analyze(a) => cmd_analyze(a, parallel),
        Command::Meta(a) => cmd_meta(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Categorize(a) => cmd_categorize(a),
        Command::Report(a) => cmd_report(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprintln!("{}", CliError::input(e.to_string().trim_end()).to_json());
            return ExitCode::from(1);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
