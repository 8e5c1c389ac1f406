use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use featfuse::data::write_csv;
use featfuse::evaluation::ConformanceReport;
use featfuse::explainers::XaiMethod;
use featfuse::fixtures::{export_to, FixtureSource, Setup};
use featfuse::fusion::{two_level_fuse, FusedRanking, FusionMode, FusionSpec, RankTable};
use featfuse::pipeline::{
    emit_report, render_summary_markdown, run_pipeline, sensor_generator, PipelineConfig, Stage, StageError,
    Summary,
};
use featfuse::Error;

#[derive(Parser)]
#[command(name = "featfuse", version, about = "Train, explain, and fuse feature rankings")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic ten-sensor dataset as CSV.
    Generate(GenerateArgs),
    /// Run the full pipeline described by a JSON config.
    Run(RunArgs),
    /// Fuse rank tables (shipped fixtures or user CSVs).
    Fuse(FuseArgs),
    /// Compare fused fixture rankings with the published top-k columns.
    Conformance(ConformanceArgs),
    /// Re-render the markdown report from a summary.json.
    Report(ReportArgs),
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long, default_value_t = 10_000)]
    n: usize,
    #[arg(long, default_value_t = 0.5)]
    anomaly_fraction: f64,
    /// Comma-separated sensor names carrying the label signal.
    #[arg(long, value_delimiter = ',')]
    planted: Option<Vec<String>>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output CSV path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Overrides the seed in the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; overrides the config.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct FuseArgs {
    /// Fuse the shipped tables of this setup.
    #[arg(long, conflicts_with = "table")]
    setup: Option<Setup>,
    /// `method=path` pairs, e.g. `shap=shap.csv`.
    #[arg(long, value_parser = parse_table_arg)]
    table: Vec<(XaiMethod, PathBuf)>,
    #[arg(long)]
    fixtures_dir: Option<PathBuf>,
    /// Optional JSON fusion spec; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long, value_parser = parse_mode)]
    mode: Option<FusionMode>,
    #[arg(long, value_delimiter = ',')]
    points: Option<Vec<f64>>,
    /// Directory for fused CSVs.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ConformanceArgs {
    #[arg(long)]
    fixtures_dir: Option<PathBuf>,
    /// Directory for conformance.json and conformance.md.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write the embedded fixture CSVs into this directory.
    #[arg(long)]
    export_fixtures: Option<PathBuf>,
}

#[derive(Args)]
struct ReportArgs {
    /// summary.json written by `run`.
    #[arg(long)]
    summary: PathBuf,
    /// Markdown destination; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_table_arg(s: &str) -> Result<(XaiMethod, PathBuf), String> {
    let (method, path) = s.split_once('=').ok_or("expected method=path")?;
    Ok((method.parse().map_err(|e: Error| e.to_string())?, PathBuf::from(path)))
}

fn parse_mode(s: &str) -> Result<FusionMode, String> {
    serde_json::from_value(serde_json::Value::String(s.replace('-', "_"))).map_err(|e| e.to_string())
}

struct Failure {
    code: u8,
    message: String,
}

impl From<StageError> for Failure {
    fn from(e: StageError) -> Self {
        Failure {
            code: e.exit_code() as u8,
            message: e.to_string(),
        }
    }
}

fn fail(stage: Stage, source: Error) -> Failure {
    StageError { stage, source }.into()
}

fn read_text(path: &Path, stage: Stage) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| fail(stage, Error::io(path, e)))
}

fn generate(args: GenerateArgs) -> Result<(), Failure> {
    let generator = sensor_generator(args.n, args.anomaly_fraction, args.planted.as_deref(), args.seed)
        .map_err(|e| fail(Stage::Config, e))?;
    let data = generator.generate().map_err(|e| fail(Stage::Data, e))?;
    let file = fs::File::create(&args.out).map_err(|e| fail(Stage::Data, Error::io(&args.out, e)))?;
    write_csv(&data, file).map_err(|e| fail(Stage::Data, e))?;
    println!("wrote {} rows to {}", data.n_rows(), args.out.display());
    Ok(())
}

fn run(args: RunArgs) -> Result<(), Failure> {
    let mut cfg = PipelineConfig::from_json(&read_text(&args.config, Stage::Config)?)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if args.out.is_some() {
        cfg.out = args.out;
    }
    let out = cfg.out.clone().unwrap_or_else(|| PathBuf::from("featfuse-out"));
    let artifacts = run_pipeline(&cfg)?;
    for w in &artifacts.warnings {
        eprintln!("warning: {w}");
    }
    let manifest = emit_report(&artifacts, &out).map_err(|e| fail(Stage::Report, e))?;
    let top = artifacts
        .fusion
        .leveled_top_k(cfg.fusion.top_k)
        .map_err(|e| fail(Stage::Fusion, e))?;
    println!(
        "leveled top-{}: {}",
        cfg.fusion.top_k,
        top.iter().map(|t| t.name.as_str()).collect::<Vec<_>>().join(", ")
    );
    println!("wrote {} artifacts to {}", manifest.artifacts.len(), out.display());
    if let Some(c) = &artifacts.conformance {
        println!("conformance: {}", if c.passed { "pass" } else { "FAIL" });
    }
    Ok(())
}

fn print_ranking(label: &str, f: &FusedRanking, k: usize) -> Result<(), Failure> {
    let top = f.top_k(k).map_err(|e| fail(Stage::Config, e))?;
    let items: Vec<String> = top
        .iter()
        .map(|t| format!("{} ({}{})", t.name, t.score, if t.flagged { ", zero" } else { "" }))
        .collect();
    println!("{label:>8}: {}", items.join(", "));
    Ok(())
}

fn fuse(args: FuseArgs) -> Result<(), Failure> {
    let mut spec = match &args.config {
        Some(path) => serde_json::from_str::<FusionSpec>(&read_text(path, Stage::Config)?)
            .map_err(|e| fail(Stage::Config, Error::InvalidConfig(e.to_string())))?,
        None => FusionSpec::default(),
    };
    if let Some(setup) = args.setup {
        spec.top_k = setup.top_k();
    }
    if let Some(k) = args.k {
        spec.top_k = k;
    }
    if let Some(mode) = args.mode {
        spec.mode = mode;
    }
    if let Some(points) = args.points {
        spec.points = points;
    }
    let tables: BTreeMap<XaiMethod, RankTable> = match (args.setup, args.table.is_empty()) {
        (Some(setup), _) => {
            let source = args.fixtures_dir.map_or(FixtureSource::Embedded, FixtureSource::Directory);
            source.rank_tables(setup).map_err(|e| fail(Stage::Data, e))?
        }
        (None, false) => args
            .table
            .iter()
            .map(|(m, path)| {
                let file = fs::File::open(path).map_err(|e| fail(Stage::Data, Error::io(path, e)))?;
                Ok((*m, RankTable::read_csv(file).map_err(|e| fail(Stage::Data, e))?))
            })
            .collect::<Result<_, Failure>>()?,
        (None, true) => {
            return Err(fail(
                Stage::Config,
                Error::InvalidConfig("pass --setup or at least one --table".into()),
            ))
        }
    };
    let p = tables.values().next().map_or(0, |t| t.feature_count());
    spec.validate(p).map_err(|e| fail(Stage::Config, e))?;
    let fused = two_level_fuse(&tables, &spec).map_err(|e| fail(Stage::Data, e))?;
    for (method, ranking) in &fused.per_method {
        print_ranking(method.label(), ranking, spec.top_k)?;
    }
    print_ranking("Leveled", &fused.leveled, spec.top_k)?;
    if let Some(dir) = args.out {
        fs::create_dir_all(&dir).map_err(|e| fail(Stage::Report, Error::io(&dir, e)))?;
        let write = |name: String, f: &FusedRanking| -> Result<(), Failure> {
            let path = dir.join(name);
            let file = fs::File::create(&path).map_err(|e| fail(Stage::Report, Error::io(&path, e)))?;
            f.write_csv(file).map_err(|e| fail(Stage::Report, e))
        };
        for (method, ranking) in &fused.per_method {
            write(format!("fused_{}.csv", method.as_str()), ranking)?;
        }
        write("fused_leveled.csv".into(), &fused.leveled)?;
    }
    Ok(())
}

fn conformance(args: ConformanceArgs) -> Result<(), Failure> {
    if let Some(dir) = &args.export_fixtures {
        export_to(dir).map_err(|e| fail(Stage::Report, e))?;
    }
    let mut json = serde_json::json!({"dataset": {"kind": "fixtures"}, "seed": 0});
    if let Some(dir) = &args.fixtures_dir {
        json["fixtures_dir"] = serde_json::Value::String(dir.display().to_string());
    }
    let cfg = PipelineConfig::from_json(&json.to_string())?;
    let artifacts = run_pipeline(&cfg)?;
    let report: ConformanceReport = artifacts.conformance.expect("fixture runs check conformance");
    println!("{}", report.to_markdown());
    if let Some(dir) = &args.out {
        fs::create_dir_all(dir).map_err(|e| fail(Stage::Report, Error::io(dir, e)))?;
        let text = report.to_json().map_err(|e| fail(Stage::Report, e))?;
        let json_path = dir.join("conformance.json");
        fs::write(&json_path, text).map_err(|e| fail(Stage::Report, Error::io(&json_path, e)))?;
        let md_path = dir.join("conformance.md");
        fs::write(&md_path, report.to_markdown()).map_err(|e| fail(Stage::Report, Error::io(&md_path, e)))?;
    }
    if report.passed {
        Ok(())
    } else {
        Err(Failure {
            code: 1,
            message: "conformance check failed".into(),
        })
    }
}

fn report(args: ReportArgs) -> Result<(), Failure> {
    let summary: Summary = serde_json::from_str(&read_text(&args.summary, Stage::Config)?)
        .map_err(|e| fail(Stage::Config, Error::InvalidConfig(e.to_string())))?;
    let references = featfuse::fixtures::reference_metrics().map_err(|e| fail(Stage::Data, e))?;
    let text = render_summary_markdown(&summary, &references);
    match args.out {
        Some(path) => fs::write(&path, text).map_err(|e| fail(Stage::Report, Error::io(&path, e))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Generate(a) => generate(a),
        Command::Run(a) => run(a),
        Command::Fuse(a) => fuse(a),
        Command::Conformance(a) => conformance(a),
        Command::Report(a) => report(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
