use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use homcap::config::RunConfig;
use homcap::lle::{lle_embed, EmbeddingSpec};
use homcap::mlp::{init_model, train, Architecture, TrainConfig};
use homcap::openml::{fetch_openml, FetchOptions, HttpTransport};
use homcap::ph::{
    build_rips_with_budget, compute_persistence, threshold_features_detailed, Subsample, ThresholdPolicy,
    DEFAULT_SIMPLEX_BUDGET,
};
use homcap::region::{mask_betti, padded_bbox, rasterize, DEFAULT_PAD, DEFAULT_RESOLUTION};
use homcap::report::{barcode_svg, render_report, CURVES_FILE, RECORDS_FILE};
use homcap::select::{select, ClassCombine, PhaseEstimator, SelectOptions, FITTED_C};
use homcap::sweep::{sweep_with_curves, write_curves_csv, write_records_csv, SweepOptions};
use homcap::synth::{homology_spec, sample_dataset, SuiteLayout};
use homcap::{Error, LabeledPointCloud};

#[derive(Parser)]
#[command(name = "homcap", version, about = "Topology of labeled data and of ReLU classifier decision regions")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    parallelism: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a synthetic dataset with known homology.
    GenData(GenData),
    /// Rips persistence of a dataset (one class or all points).
    Ph(Ph),
    /// Train one classifier.
    Train(Train),
    /// Train an architecture grid over the synthetic suite.
    Sweep(Sweep),
    /// Estimate data homology and recommend layer widths.
    Select(Select),
    /// Locally linear embedding of a dataset.
    Embed(Embed),
    /// Download a binary OpenML dataset as standardized CSV.
    FetchOpenml(FetchOpenml),
    /// Render SVG and CSV summaries of a directory of artifacts.
    Report(Report),
}

#[derive(Args)]
struct GenData {
    #[arg(long)]
    beta0: usize,
    #[arg(long, default_value_t = 0)]
    beta1: usize,
    #[arg(long, default_value_t = 5000)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    margin: Option<f64>,
    #[arg(short, long)]
    out: PathBuf,
}

#[derive(Args)]
struct Ph {
    input: PathBuf,
    #[arg(long)]
    eps_max: f64,
    #[arg(long, default_value_t = 2)]
    max_dim: usize,
    /// Restrict to one label.
    #[arg(long)]
    class: Option<u8>,
    /// all | maxmin:<k> | random:<k>:<seed> | lattice:<pitch>[:<reach>]
    #[arg(long, default_value = "all")]
    subsample: String,
    #[arg(long, default_value_t = DEFAULT_SIMPLEX_BUDGET)]
    budget: u64,
    /// Also report thresholded Betti numbers under this policy.
    #[arg(long)]
    policy: Option<String>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct Train {
    input: PathBuf,
    #[arg(long)]
    ell: usize,
    #[arg(long)]
    h0: usize,
    /// Width of the deeper layers (default: beta_0 of the data, else 1).
    #[arg(long)]
    trunk_width: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// TOML training configuration; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    max_steps: Option<usize>,
    #[arg(long, default_value_t = DEFAULT_RESOLUTION)]
    resolution: usize,
    #[arg(short, long)]
    out: PathBuf,
}

#[derive(Args)]
struct Sweep {
    /// TOML run configuration with a [sweep] table.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    depths: Vec<usize>,
    #[arg(long, value_delimiter = ',')]
    widths: Vec<usize>,
    #[arg(long, default_value_t = 1)]
    beta0_max: usize,
    #[arg(long, default_value_t = 0)]
    beta1_max: usize,
    #[arg(long, default_value_t = 1)]
    trials: usize,
    #[arg(long, default_value_t = 5000)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    max_steps: Option<usize>,
    #[arg(long)]
    fresh_samples: Option<usize>,
    #[arg(short, long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct Select {
    input: PathBuf,
    #[arg(long, default_value = "two-sigma")]
    policy: String,
    #[arg(long, default_value_t = 0.375)]
    eps_max: f64,
    /// Phase slope C (repeat for several estimators).
    #[arg(long = "c", default_values_t = [FITTED_C])]
    c: Vec<f64>,
    /// max | positive
    #[arg(long, default_value = "max")]
    combine: String,
    #[arg(long)]
    subsample: Option<String>,
    /// Write the JSON report here (and per-class diagrams beside it).
    #[arg(short, long)]
    out: Option<PathBuf>,
    /// Print the human-readable summary instead of JSON.
    #[arg(long)]
    text: bool,
}

#[derive(Args)]
struct Embed {
    input: PathBuf,
    #[arg(long, default_value_t = 120)]
    k: usize,
    #[arg(long, default_value_t = 3)]
    dim: usize,
    #[arg(short, long)]
    out: PathBuf,
}

#[derive(Args)]
struct FetchOpenml {
    name: String,
    #[arg(long)]
    cache_dir: Option<PathBuf>,
    #[arg(long)]
    no_standardize: bool,
    #[arg(short, long)]
    out: PathBuf,
}

#[derive(Args)]
struct Report {
    dir: PathBuf,
    /// Output directory (default: <dir>/report).
    #[arg(short, long)]
    out: Option<PathBuf>,
}

struct Failure {
    error: Error,
    context: Value,
}

type CmdResult = Result<Value, Failure>;

trait Ctx<T> {
    fn ctx(self, context: Value) -> Result<T, Failure>;
}

impl<T, E: Into<Error>> Ctx<T> for Result<T, E> {
    fn ctx(self, context: Value) -> Result<T, Failure> {
        self.map_err(|e| Failure {
            error: e.into(),
            context,
        })
    }
}

fn io_ctx(path: &Path) -> Value {
    json!({ "path": path.display().to_string() })
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<(), Failure> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).ctx(io_ctx(parent))?;
    }
    std::fs::write(path, contents).ctx(io_ctx(path))
}

fn load(path: &Path) -> Result<LabeledPointCloud, Failure> {
    LabeledPointCloud::load(path).ctx(io_ctx(path))
}

fn with_extension(path: &Path, ext: &str) -> PathBuf {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("out");
    let stem = stem.trim_end_matches(".diagram");
    path.with_file_name(format!("{stem}.{ext}"))
}

fn gen_data(a: &GenData) -> CmdResult {
    let layout = SuiteLayout {
        n_points: a.n,
        margin: a.margin,
        ..SuiteLayout::default()
    };
    let ctx = json!({ "beta0": a.beta0, "beta1": a.beta1, "n": a.n });
    let spec = homology_spec(a.beta0, a.beta1, a.seed, &layout).ctx(ctx.clone())?;
    let cloud = sample_dataset(&spec).ctx(ctx)?;
    if let Some(parent) = a.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).ctx(io_ctx(parent))?;
    }
    cloud.save(&a.out).ctx(io_ctx(&a.out))?;
    let spec_path = with_extension(&a.out, "spec.toml");
    write_file(&spec_path, spec.to_toml().ctx(json!({}))?)?;
    Ok(json!({
        "output": a.out.display().to_string(),
        "spec": spec_path.display().to_string(),
        "n_points": cloud.len(),
        "ground_truth": cloud.ground_truth,
    }))
}

fn ph(a: &Ph) -> CmdResult {
    let cloud = load(&a.input)?;
    let ctx = json!({ "input": a.input.display().to_string(), "eps_max": a.eps_max });
    let points = match a.class {
        Some(l) => cloud.class_points(l).ctx(ctx.clone())?,
        None => cloud.points.clone(),
    };
    let sub = Subsample::parse(&a.subsample).ctx(ctx.clone())?;
    let used = sub.apply(&points).ctx(ctx.clone())?;
    let complex = build_rips_with_budget(&used, a.eps_max, a.max_dim, a.budget).ctx(ctx.clone())?;
    let diagram = compute_persistence(&complex).ctx(ctx.clone())?;
    write_file(&a.out, diagram.to_json().ctx(ctx.clone())?)?;
    let svg = with_extension(&a.out, "svg");
    write_file(&svg, barcode_svg(&diagram))?;
    let mut out = json!({
        "diagram": a.out.display().to_string(),
        "barcode": svg.display().to_string(),
        "points_used": used.len(),
        "simplices": complex.len(),
        "pairs": diagram.pairs().count(),
    });
    if let Some(p) = &a.policy {
        let policy = ThresholdPolicy::parse(p).ctx(ctx.clone())?;
        let t = threshold_features_detailed(&diagram, policy).ctx(ctx)?;
        out["betti"] = json!(t.profile.betti);
        out["cutoffs"] = json!(t.cutoffs);
    }
    Ok(out)
}

fn train_cmd(a: &Train) -> CmdResult {
    let cloud = load(&a.input)?;
    let ctx = json!({ "input": a.input.display().to_string(), "ell": a.ell, "h0": a.h0 });
    let mut cfg = match &a.config {
        Some(p) => {
            let s = std::fs::read_to_string(p).ctx(io_ctx(p))?;
            toml::from_str::<TrainConfig>(&s)
                .map_err(|e| Error::InvalidConfig(e.to_string()))
                .ctx(io_ctx(p))?
        }
        None => TrainConfig::default(),
    };
    cfg.seed = a.seed;
    if let Some(m) = a.max_steps {
        cfg.max_steps = m;
    }
    cfg.validate().ctx(ctx.clone())?;
    let beta0 = cloud.ground_truth.as_ref().map_or(1, |g| g.b0().max(1));
    let arch = Architecture::new(a.ell, a.h0, a.trunk_width.unwrap_or(beta0)).ctx(ctx.clone())?;
    let model = init_model(arch, cloud.dim(), beta0, a.seed).ctx(ctx.clone())?;
    let result = train(model, &cloud, &cfg).ctx(ctx.clone())?;
    std::fs::create_dir_all(&a.out).ctx(io_ctx(&a.out))?;
    let model_path = a.out.join("model.bin");
    let mut buf = Vec::new();
    result.final_model.write_checkpoint(&mut buf).ctx(ctx.clone())?;
    write_file(&model_path, buf)?;
    let mut curve = String::from("step,error\n");
    for (s, e) in &result.error_curve {
        curve.push_str(&format!("{s},{e}\n"));
    }
    write_file(&a.out.join("curve.csv"), curve)?;
    let mut summary = json!({
        "architecture": arch,
        "best_error": result.best_error,
        "final_error": result.final_error(),
        "converged_at": result.converged_at,
        "steps": result.steps,
        "model": model_path.display().to_string(),
    });
    if cloud.dim() == 2 && a.resolution > 0 {
        let (lo, hi) = cloud.bounding_box();
        let bbox = padded_bbox(&lo, &hi, DEFAULT_PAD).ctx(ctx.clone())?;
        let mask = rasterize(&result.final_model, bbox, a.resolution).ctx(ctx)?;
        let mut pgm = Vec::new();
        mask.write_pgm(&mut pgm).ctx(json!({}))?;
        write_file(&a.out.join("region.pgm"), pgm)?;
        summary["region_betti"] = json!(mask_betti(&mask).betti);
    }
    write_file(
        &a.out.join("summary.json"),
        serde_json::to_string_pretty(&summary).ctx(json!({}))?,
    )?;
    Ok(summary)
}

fn sweep_cmd(a: &Sweep) -> CmdResult {
    let mut cfg = match &a.config {
        Some(p) => {
            let s = std::fs::read_to_string(p).ctx(io_ctx(p))?;
            RunConfig::from_toml(&s).ctx(io_ctx(p))?
        }
        None => {
            let mut cfg = RunConfig::new(a.out.clone().unwrap_or_else(|| PathBuf::from("sweep")));
            cfg.sweep = Some(homcap::config::SweepPlan {
                depths: a.depths.clone(),
                widths: a.widths.clone(),
                beta0_max: a.beta0_max,
                beta1_max: a.beta1_max,
                trials: a.trials,
                n_points: a.n,
                data_seed: a.seed,
                train: TrainConfig {
                    seed: a.seed,
                    ..TrainConfig::default()
                },
                options: SweepOptions::default(),
            });
            cfg
        }
    };
    if let Some(o) = &a.out {
        cfg.output_dir = o.clone();
    }
    let plan = cfg.sweep.as_mut().ok_or(Failure {
        error: Error::InvalidConfig("the configuration has no [sweep] table".into()),
        context: json!({}),
    })?;
    if let Some(m) = a.max_steps {
        plan.train.max_steps = m;
    }
    if let Some(f) = a.fresh_samples {
        plan.options.fresh_samples = f;
    }
    cfg.validate().ctx(json!({}))?;
    let plan = cfg.sweep.as_ref().expect("checked above");
    let archs = plan.architectures().ctx(json!({}))?;
    let specs = plan.specs().ctx(json!({}))?;
    let (records, curves) =
        sweep_with_curves(&archs, &specs, plan.trials, &plan.train, &plan.options).ctx(json!({}))?;
    let dir = &cfg.output_dir;
    std::fs::create_dir_all(dir).ctx(io_ctx(dir))?;
    let mut buf = Vec::new();
    write_records_csv(&records, &mut buf).ctx(json!({}))?;
    write_file(&dir.join(RECORDS_FILE), buf)?;
    let mut buf = Vec::new();
    write_curves_csv(&curves, &mut buf).ctx(json!({}))?;
    write_file(&dir.join(CURVES_FILE), buf)?;
    write_file(&dir.join("run.toml"), cfg.to_toml().ctx(json!({}))?)?;
    Ok(json!({
        "output_dir": dir.display().to_string(),
        "records": records.len(),
        "failures": records.iter().filter(|r| r.failure.is_some()).count(),
    }))
}

fn select_cmd(a: &Select) -> CmdResult {
    let cloud = load(&a.input)?;
    let ctx = json!({ "input": a.input.display().to_string() });
    let combine = match a.combine.as_str() {
        "max" => ClassCombine::Max,
        "positive" => ClassCombine::Positive,
        other => {
            return Err(Failure {
                error: Error::InvalidInput(format!("unknown combine rule {other:?}")),
                context: ctx,
            })
        }
    };
    let opts = SelectOptions {
        eps_max: a.eps_max,
        policy: ThresholdPolicy::parse(&a.policy).ctx(ctx.clone())?,
        combine,
        subsample: a.subsample.as_deref().map(Subsample::parse).transpose().ctx(ctx.clone())?,
    };
    let estimators: Vec<PhaseEstimator> = a
        .c
        .iter()
        .map(|&c| PhaseEstimator::new(c, 1))
        .collect::<Result<_, _>>()
        .ctx(ctx.clone())?;
    let mut report = select(&cloud, &opts, &estimators).ctx(ctx.clone())?;
    report
        .provenance
        .insert("input".into(), a.input.display().to_string());
    if let Some(out) = &a.out {
        for c in &report.classes {
            let p = with_extension(out, &format!("class{}.diagram.json", c.label));
            write_file(&p, c.diagram.to_json().ctx(ctx.clone())?)?;
            report
                .provenance
                .insert(format!("class{}_diagram", c.label), p.display().to_string());
        }
        write_file(out, report.to_json().ctx(ctx.clone())?)?;
    }
    if a.text {
        print!("{}", report.to_text());
        return Ok(Value::Null);
    }
    serde_json::to_value(&report).ctx(ctx)
}

fn embed_cmd(a: &Embed) -> CmdResult {
    let cloud = load(&a.input)?;
    let spec = EmbeddingSpec {
        k_neighbors: a.k,
        target_dim: a.dim,
    };
    let ctx = json!({ "input": a.input.display().to_string(), "k": a.k, "dim": a.dim });
    let emb = lle_embed(&cloud.points, &spec).ctx(ctx.clone())?;
    let out = LabeledPointCloud::new(emb, cloud.labels.clone()).ctx(ctx)?;
    if let Some(parent) = a.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).ctx(io_ctx(parent))?;
    }
    out.save(&a.out).ctx(io_ctx(&a.out))?;
    Ok(json!({ "output": a.out.display().to_string(), "n_points": out.len(), "dim": out.dim() }))
}

fn fetch_cmd(a: &FetchOpenml) -> CmdResult {
    let mut opts = FetchOptions::from_env();
    if let Some(d) = &a.cache_dir {
        opts.cache_dir = d.clone();
    }
    opts.standardize = !a.no_standardize;
    let ctx = json!({ "name": a.name, "cache_dir": opts.cache_dir.display().to_string() });
    let ds = fetch_openml(&a.name, &opts, &HttpTransport::default()).ctx(ctx)?;
    if let Some(parent) = a.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).ctx(io_ctx(parent))?;
    }
    ds.cloud.save(&a.out).ctx(io_ctx(&a.out))?;
    Ok(json!({
        "id": ds.id,
        "name": ds.name,
        "n_points": ds.cloud.len(),
        "dim": ds.cloud.dim(),
        "classes": ds.classes,
        "from_cache": ds.from_cache,
        "output": a.out.display().to_string(),
    }))
}

fn report_cmd(a: &Report) -> CmdResult {
    let out = a.out.clone().unwrap_or_else(|| a.dir.join("report"));
    let summary = render_report(&a.dir, &out).ctx(io_ctx(&a.dir))?;
    let files: Vec<String> = summary.files().iter().map(|p| p.display().to_string()).collect();
    Ok(json!({
        "barcodes": summary.barcodes.len(),
        "error_curves": summary.error_curves.len(),
        "convergence": summary.convergence.is_some(),
        "expressivity": summary.expressivity.is_some(),
        "files": files,
    }))
}

fn run(cli: &Cli) -> CmdResult {
    match &cli.command {
        Command::GenData(a) => gen_data(a),
        Command::Ph(a) => ph(a),
        Command::Train(a) => train_cmd(a),
        Command::Sweep(a) => sweep_cmd(a),
        Command::Select(a) => select_cmd(a),
        Command::Embed(a) => embed_cmd(a),
        Command::FetchOpenml(a) => fetch_cmd(a),
        Command::Report(a) => report_cmd(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let err = json!({
                "code": "usage",
                "message": e.kind().to_string(),
                "context": { "detail": e.to_string() },
            });
            eprintln!("{err}");
            return ExitCode::from(2);
        }
    };
    if let Some(n) = cli.parallelism {
        if n == 0 {
            eprintln!(
                "{}",
                json!({ "code": "usage", "message": "--parallelism must be >= 1", "context": {} })
            );
            return ExitCode::from(2);
        }
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match run(&cli) {
        Ok(Value::Null) => ExitCode::SUCCESS,
        Ok(v) => {
            println!("{}", serde_json::to_string_pretty(&v).unwrap_or_default());
            ExitCode::SUCCESS
        }
        Err(f) => {
            let err = json!({
                "code": f.error.code(),
                "message": f.error.to_string(),
                "context": f.context,
            });
            eprintln!("{err}");
            ExitCode::from(1)
        }
    }
}
