//! `qtl`: batch driver for the beam-SNR transfer-learning experiments.

use std::fmt::Write as _;
use std::io::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use qtl_core::checkpoint::AnyModel;
use qtl_core::data::{split_labeled, Dataset, Domain, ShiftSpec, SplitSize, SyntheticConfig};
use qtl_core::evaluation::{accuracy, accuracy_vs_samples_curve, curve_csv, evaluate};
use qtl_core::experiment::{self, FixtureSpec, ModelSpec, RunMetadata};
use qtl_core::model::{Classifier, ModelKind, ParamGroup};
use qtl_core::neural::AdamWConfig;
use qtl_core::quantum_classifier::GradientMethod;
use qtl_core::training::{
    finetune_once, repeat_seeds, summarize_runs, FreezePolicy, RepeatMode, TrainConfig, TrainTrace, TransferConfig,
};
use qtl_core::{Error, Result};

#[derive(Parser, Debug)]
#[command(name = "qtl", version, about = "Quantum and classical transfer-learning experiments on beam-SNR data")]
struct Cli {
    /// Root seed; every random draw of the run derives from it.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Compute gradients on one thread so reruns are bit-identical.
    #[arg(long, global = true)]
    deterministic: bool,

    /// Directory for all outputs of the run.
    #[arg(long, global = true, env = "QTL_OUT_DIR", default_value = "qtl-out")]
    out_dir: PathBuf,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic two-domain dataset CSV.
    Gen(GenArgs),
    /// Train a model on labelled source-domain samples.
    Train(TrainArgs),
    /// Fine-tune a trained model on few-shot target samples, repeatedly.
    Transfer(TransferArgs),
    /// Accuracy, confusion matrix, ROC curves and AUC of a checkpoint.
    Eval(EvalArgs),
    /// Accuracy against the number of labelled source samples.
    Curve(CurveArgs),
    /// Run gen, train, transfer, eval and curve on the reference setup.
    MakeFigures(FigureArgs),
}

#[derive(Args, Debug, Clone)]
struct ShiftArgs {
    /// Source-domain sample count.
    #[arg(long, default_value_t = 2000)]
    n_source: usize,
    /// Target-domain sample count.
    #[arg(long, default_value_t = 1040)]
    n_target: usize,
    /// Multiplier on every shift term of the default shift; 0 disables the shift.
    #[arg(long, default_value_t = 1.0)]
    shift: f64,
    /// Per-feature offset scale (dB); overrides the scaled default.
    #[arg(long)]
    offset_scale: Option<f64>,
    /// Per-feature gain spread; overrides the scaled default.
    #[arg(long)]
    gain_spread: Option<f64>,
    /// Per-class pattern change scale (dB); overrides the scaled default.
    #[arg(long)]
    class_offset: Option<f64>,
    /// Offset added to every target feature (dB); overrides the scaled default.
    #[arg(long, allow_hyphen_values = true)]
    common_offset: Option<f64>,
    /// Source noise sigma (dB).
    #[arg(long)]
    noise_source: Option<f64>,
    /// Target noise sigma (dB).
    #[arg(long)]
    noise_target: Option<f64>,
}

impl ShiftArgs {
    fn spec(&self, seed: u64) -> ShiftSpec {
        let base = ShiftSpec::default();
        let k = self.shift;
        ShiftSpec {
            mean_offset_scale: self.offset_scale.unwrap_or(k * base.mean_offset_scale),
            feature_gain_spread: self.gain_spread.unwrap_or(k * base.feature_gain_spread),
            common_offset: self.common_offset.unwrap_or(k * base.common_offset),
            class_offset_scale: self.class_offset.unwrap_or(k * base.class_offset_scale),
            noise_sigma_source: self.noise_source.unwrap_or(base.noise_sigma_source),
            noise_sigma_target: self.noise_target.unwrap_or(base.noise_sigma_target),
            seed,
        }
    }
}

#[derive(Args, Debug, Clone)]
struct GenArgs {
    #[command(flatten)]
    shift: ShiftArgs,
    /// File name inside the output directory.
    #[arg(long, default_value = "dataset.csv")]
    file: String,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum GradientArg {
    /// Parameter-shift rule (two shifted circuits per angle).
    Shift,
    /// Reverse-mode adjoint sweep; same gradient, faster.
    Adjoint,
}

impl From<GradientArg> for GradientMethod {
    fn from(g: GradientArg) -> Self {
        match g {
            GradientArg::Shift => GradientMethod::ParameterShift,
            GradientArg::Adjoint => GradientMethod::Adjoint,
        }
    }
}

#[derive(Args, Debug, Clone)]
struct ModelArgs {
    /// dnn, qnn, knn or gnb.
    #[arg(long, default_value = "qnn")]
    model: ModelKind,
    /// QNN qubit count.
    #[arg(long, default_value_t = 10)]
    qubits: usize,
    /// QNN ansatz layers.
    #[arg(long, default_value_t = 1)]
    layers: usize,
    /// QNN circuit gradient method.
    #[arg(long, value_enum, default_value_t = GradientArg::Shift)]
    gradient: GradientArg,
    /// DNN hidden width.
    #[arg(long, default_value_t = 100)]
    hidden: usize,
    /// DNN residual block count.
    #[arg(long, default_value_t = 3)]
    blocks: usize,
    /// kNN neighbour count.
    #[arg(long, default_value_t = 5)]
    k: usize,
}

impl ModelArgs {
    fn spec(&self) -> ModelSpec {
        let mut spec = ModelSpec::new(self.model);
        spec.qnn.n_qubits = self.qubits;
        spec.qnn.n_layers = self.layers;
        spec.qnn.gradient = self.gradient.into();
        spec.dnn.hidden = self.hidden;
        spec.dnn.n_blocks = self.blocks;
        spec.knn_k = self.k;
        spec
    }
}

#[derive(Args, Debug, Clone)]
struct OptimArgs {
    /// Mini-batch size.
    #[arg(long, default_value_t = 100)]
    batch_size: usize,
    /// AdamW learning rate.
    #[arg(long, default_value_t = 0.02)]
    lr: f64,
    /// AdamW decoupled weight decay.
    #[arg(long, default_value_t = 1e-4)]
    weight_decay: f64,
}

impl OptimArgs {
    fn config(&self, epochs: usize, seed: u64, deterministic: bool) -> TrainConfig {
        TrainConfig {
            batch_size: self.batch_size,
            epochs,
            optimizer: AdamWConfig {
                lr: self.lr,
                weight_decay: self.weight_decay,
                ..AdamWConfig::default()
            },
            seed,
            deterministic,
        }
    }
}

#[derive(Args, Debug, Clone)]
struct TrainArgs {
    /// Dataset CSV.
    #[arg(long)]
    data: PathBuf,
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    optim: OptimArgs,
    /// Training epochs.
    #[arg(long, default_value_t = 100)]
    epochs: usize,
    /// Labelled source samples (stratified); default is the whole source domain.
    #[arg(long)]
    labeled: Option<usize>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum RepeatArg {
    /// New few-shot subset per repeat.
    Resample,
    /// One subset, new shuffle order per repeat.
    Reshuffle,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum GroupArg {
    Input,
    Ansatz,
    Hidden,
    Output,
}

impl From<GroupArg> for ParamGroup {
    fn from(g: GroupArg) -> Self {
        match g {
            GroupArg::Input => ParamGroup::InputLayer,
            GroupArg::Ansatz => ParamGroup::Ansatz,
            GroupArg::Hidden => ParamGroup::HiddenBlocks,
            GroupArg::Output => ParamGroup::OutputLayer,
        }
    }
}

#[derive(Args, Debug, Clone)]
struct TransferArgs {
    /// Dataset CSV.
    #[arg(long)]
    data: PathBuf,
    /// Pretrained model checkpoint.
    #[arg(long)]
    checkpoint: PathBuf,
    /// Labelled target samples per repeat.
    #[arg(long, conflicts_with = "fraction")]
    samples: Option<usize>,
    /// Labelled target fraction per repeat (instead of --samples).
    #[arg(long)]
    fraction: Option<f64>,
    /// Fine-tuning epochs.
    #[arg(long, default_value_t = 50)]
    epochs: usize,
    /// Number of fine-tuning repeats.
    #[arg(long, default_value_t = 5)]
    repeats: usize,
    /// How repeats differ.
    #[arg(long, value_enum, default_value_t = RepeatArg::Resample)]
    repeat_mode: RepeatArg,
    /// Frozen parameter groups, comma separated; default input,output.
    #[arg(long, value_enum, value_delimiter = ',')]
    freeze: Option<Vec<GroupArg>>,
    /// Override the checkpoint's QNN gradient method.
    #[arg(long, value_enum)]
    gradient: Option<GradientArg>,
    #[command(flatten)]
    optim: OptimArgs,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum DomainArg {
    Source,
    Target,
    All,
}

#[derive(Args, Debug, Clone)]
struct EvalArgs {
    /// Dataset CSV.
    #[arg(long)]
    data: PathBuf,
    /// Model checkpoint.
    #[arg(long)]
    checkpoint: PathBuf,
    /// Samples to score.
    #[arg(long, value_enum, default_value_t = DomainArg::Target)]
    domain: DomainArg,
}

#[derive(Args, Debug, Clone)]
struct CurveArgs {
    /// Dataset CSV.
    #[arg(long)]
    data: PathBuf,
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    optim: OptimArgs,
    /// Training epochs per grid point.
    #[arg(long, default_value_t = 100)]
    epochs: usize,
    /// Labelled source counts, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "50,100,200,500,1000")]
    grid: Vec<usize>,
    /// Repeats per grid point.
    #[arg(long, default_value_t = 1)]
    repeats: usize,
    /// Domain scored at each grid point (source scores the unused source samples).
    #[arg(long, value_enum, default_value_t = DomainArg::Target)]
    eval_domain: DomainArg,
}

#[derive(Args, Debug, Clone)]
struct FigureArgs {
    /// QNN circuit gradient method.
    #[arg(long, value_enum, default_value_t = GradientArg::Adjoint)]
    gradient: GradientArg,
    /// Labelled source counts for the accuracy curves.
    #[arg(long, value_delimiter = ',', default_value = "50,100,200,500,1000")]
    grid: Vec<usize>,
    /// Skip the accuracy curves.
    #[arg(long)]
    no_curve: bool,
}

struct Ctx {
    seed: u64,
    deterministic: bool,
    out: PathBuf,
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn ensure_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn pretty(v: &Value) -> String {
    serde_json::to_string_pretty(v).expect("plain JSON")
}

fn trace_csv(trace: &TrainTrace) -> String {
    let mut out = String::from("epoch,loss,accuracy\n");
    for e in &trace.epochs {
        let _ = writeln!(out, "{},{:?},{:?}", e.epoch, e.loss, e.accuracy);
    }
    out
}

fn cmd_gen(ctx: &Ctx, args: &GenArgs) -> Result<Value> {
    ensure_dir(&ctx.out)?;
    let shift = args.shift.spec(ctx.seed);
    let config = SyntheticConfig::new(args.shift.n_source, args.shift.n_target, shift);
    let dataset = qtl_core::data::generate_synthetic_with(&config)?;
    let path = ctx.out.join(&args.file);
    dataset.write_csv(&path)?;
    let _ = write!(std::io::stdout(), "{}", dataset.counts_table());

    let mut meta = RunMetadata::new("gen", ctx.seed, ctx.deterministic, dataset.content_hash());
    meta.settings = json!({ "synthetic": config, "path": path });
    meta.metrics = json!({
        "n_samples": dataset.len(),
        "source_counts": dataset.class_counts(Domain::Source),
        "target_counts": dataset.class_counts(Domain::Target),
    });
    meta.write(ctx.out.join("gen_run.json"))?;
    Ok(json!({ "dataset": path, "dataset_hash": meta.dataset_hash, "n_samples": dataset.len() }))
}

fn cmd_train(ctx: &Ctx, args: &TrainArgs) -> Result<Value> {
    ensure_dir(&ctx.out)?;
    let dataset = Dataset::load_csv(&args.data)?;
    let n_source = dataset.domain_indices(Domain::Source).len();
    let labeled = args.labeled.unwrap_or(n_source);
    if labeled == 0 {
        return Err(Error::Config("--labeled must be positive".into()));
    }
    let split = split_labeled(&dataset, Domain::Source, SplitSize::Count(labeled), ctx.seed)?;
    let train = dataset.select(&split.labeled);
    let held_out = dataset.select(&split.eval);
    let target = dataset.domain_samples(Domain::Target);

    let spec = args.model.spec();
    let config = args.optim.config(args.epochs, ctx.seed, ctx.deterministic);
    let (model, trace) = experiment::train_model(&spec, &train, None, &config)?;
    model.save(ctx.out.join("model.json"))?;
    if let Some(trace) = &trace {
        write(&ctx.out.join("trace.csv"), &trace_csv(trace))?;
    }

    let mut metrics = json!({
        "model": spec.kind,
        "n_labeled": train.len(),
        "parameters": experiment::param_count(&model),
        "quantum_parameters": experiment::quantum_param_count(&model),
        "train_accuracy": accuracy(&model, &train)?,
        "in_domain_accuracy": if held_out.is_empty() { None } else { Some(accuracy(&model, &held_out)?) },
        "target_accuracy": if target.is_empty() { None } else { Some(accuracy(&model, &target)?) },
    });
    if let Some(last) = trace.as_ref().and_then(|t| t.epochs.last()) {
        metrics["final_loss"] = json!(last.loss);
    }
    write(&ctx.out.join("summary.json"), &pretty(&metrics))?;

    let mut meta = RunMetadata::new("train", ctx.seed, ctx.deterministic, dataset.content_hash());
    meta.model = Some(spec);
    meta.train = spec.kind.is_gradient_trained().then_some(config);
    meta.settings = json!({ "data": args.data, "labeled": labeled });
    meta.metrics = metrics.clone();
    meta.write(ctx.out.join("run.json"))?;
    Ok(metrics)
}

fn cmd_transfer(ctx: &Ctx, args: &TransferArgs) -> Result<Value> {
    ensure_dir(&ctx.out)?;
    let dataset = Dataset::load_csv(&args.data)?;
    let mut model = AnyModel::load(&args.checkpoint)?;
    if let (Some(g), AnyModel::Qnn(q)) = (args.gradient, &mut model) {
        q.set_gradient_method(g.into());
    }
    if args.repeats == 0 {
        return Err(Error::Config("--repeats must be at least 1".into()));
    }
    let samples = match (args.samples, args.fraction) {
        (_, Some(f)) => SplitSize::Fraction(f),
        (Some(n), None) => SplitSize::Count(n),
        (None, None) => SplitSize::Count(104),
    };
    if matches!(samples, SplitSize::Count(0)) {
        return Err(Error::Config("--samples must be positive".into()));
    }
    let mut transfer = TransferConfig::new(model.kind(), samples)?;
    transfer.epochs = args.epochs;
    transfer.repeat_mode = match args.repeat_mode {
        RepeatArg::Resample => RepeatMode::Resample,
        RepeatArg::Reshuffle => RepeatMode::Reshuffle,
    };
    if let Some(groups) = &args.freeze {
        transfer.freeze = FreezePolicy {
            frozen: groups.iter().map(|&g| g.into()).collect(),
        };
    }
    let config = args.optim.config(transfer.epochs, ctx.seed, ctx.deterministic);

    let seeds = repeat_seeds(ctx.seed, args.repeats, transfer.repeat_mode);
    let mut runs = Vec::with_capacity(seeds.len());
    let mut first: Option<AnyModel> = None;
    for &(split_seed, shuffle_seed) in &seeds {
        let (tuned, run) = match &model {
            AnyModel::Dnn(m) => {
                let (t, r) = finetune_once(m, &dataset, &transfer, &config, split_seed, shuffle_seed)?;
                (AnyModel::Dnn(t), r)
            }
            AnyModel::Qnn(m) => {
                let (t, r) = finetune_once(m, &dataset, &transfer, &config, split_seed, shuffle_seed)?;
                (AnyModel::Qnn(t), r)
            }
            other => return Err(Error::Config(format!("{} models cannot be fine-tuned", other.kind()))),
        };
        first.get_or_insert(tuned);
        runs.push(run);
    }
    let summary = summarize_runs(runs);
    if let Some(m) = &first {
        m.save(ctx.out.join("model_transfer.json"))?;
    }
    let mut table = String::from("repeat,split_seed,shuffle_seed,n_transfer,n_eval,accuracy_before,accuracy_after\n");
    for (i, r) in summary.runs.iter().enumerate() {
        let _ = writeln!(
            table,
            "{i},{},{},{},{},{:?},{:?}",
            r.split_seed, r.shuffle_seed, r.n_transfer, r.n_eval, r.accuracy_before, r.accuracy_after
        );
    }
    write(&ctx.out.join("transfer_runs.csv"), &table)?;

    let metrics = json!({
        "model": model.kind(),
        "repeats": summary.runs.len(),
        "n_transfer": summary.runs[0].n_transfer,
        "mean_before": summary.mean_before,
        "std_before": summary.std_before,
        "mean_after": summary.mean_after,
        "std_after": summary.std_after,
        "runs": summary.runs,
    });
    write(&ctx.out.join("summary.json"), &pretty(&metrics))?;

    let mut meta = RunMetadata::new("transfer", ctx.seed, ctx.deterministic, dataset.content_hash());
    meta.train = Some(config);
    meta.transfer = Some(transfer);
    meta.settings = json!({ "data": args.data, "checkpoint": args.checkpoint, "repeats": args.repeats });
    meta.metrics = metrics.clone();
    meta.write(ctx.out.join("run.json"))?;
    Ok(metrics)
}

fn cmd_eval(ctx: &Ctx, args: &EvalArgs) -> Result<Value> {
    ensure_dir(&ctx.out)?;
    let dataset = Dataset::load_csv(&args.data)?;
    let model = AnyModel::load(&args.checkpoint)?;
    let samples: Vec<_> = match args.domain {
        DomainArg::Source => dataset.domain_samples(Domain::Source),
        DomainArg::Target => dataset.domain_samples(Domain::Target),
        DomainArg::All => dataset.samples.iter().collect(),
    };
    let report = evaluate(&model, &samples)?;
    report.write_tables(&ctx.out)?;
    let metrics = json!({
        "model": model.kind(),
        "n_samples": report.n_samples,
        "accuracy": report.accuracy,
        "per_class_auc": report.per_class_auc,
        "macro_auc": report.macro_auc,
        "micro_auc": report.micro_auc,
    });
    let mut meta = RunMetadata::new("eval", ctx.seed, ctx.deterministic, dataset.content_hash());
    meta.settings = json!({ "data": args.data, "checkpoint": args.checkpoint, "domain": format!("{:?}", args.domain).to_lowercase() });
    meta.metrics = metrics.clone();
    meta.write(ctx.out.join("run.json"))?;
    Ok(metrics)
}

fn cmd_curve(ctx: &Ctx, args: &CurveArgs) -> Result<Value> {
    ensure_dir(&ctx.out)?;
    let dataset = Dataset::load_csv(&args.data)?;
    let spec = args.model.spec();
    let config = args.optim.config(args.epochs, ctx.seed, ctx.deterministic);
    let eval_domain = match args.eval_domain {
        DomainArg::Source => Domain::Source,
        DomainArg::Target => Domain::Target,
        DomainArg::All => return Err(Error::Config("curve scores one domain: source or target".into())),
    };
    let factory = |train: &[&qtl_core::data::BeamSnrSample], seed: u64| {
        let cfg = TrainConfig { seed, ..config };
        experiment::train_model(&spec, train, None, &cfg).map(|(m, _)| m)
    };
    let points = accuracy_vs_samples_curve(factory, &dataset, &args.grid, args.repeats, eval_domain, ctx.seed)?;
    write(&ctx.out.join("curve.csv"), &curve_csv(&points))?;
    let metrics = json!({ "model": spec.kind, "points": points });
    let mut meta = RunMetadata::new("curve", ctx.seed, ctx.deterministic, dataset.content_hash());
    meta.model = Some(spec);
    meta.train = Some(config);
    meta.settings = json!({ "data": args.data, "grid": args.grid, "repeats": args.repeats, "eval_domain": eval_domain });
    meta.metrics = metrics.clone();
    meta.write(ctx.out.join("run.json"))?;
    Ok(metrics)
}

fn cmd_make_figures(ctx: &Ctx, args: &FigureArgs) -> Result<Value> {
    let fixture = FixtureSpec {
        seed: ctx.seed,
        ..FixtureSpec::default()
    };
    let sub = |name: &str| Ctx {
        seed: ctx.seed,
        deterministic: ctx.deterministic,
        out: ctx.out.join(name),
    };
    let shift = ShiftArgs {
        n_source: fixture.n_source,
        n_target: fixture.n_target,
        shift: 1.0,
        offset_scale: None,
        gain_spread: None,
        class_offset: None,
        common_offset: None,
        noise_source: None,
        noise_target: None,
    };
    cmd_gen(
        &sub("data"),
        &GenArgs {
            shift,
            file: "dataset.csv".into(),
        },
    )?;
    let data = ctx.out.join("data").join("dataset.csv");
    let optim = OptimArgs {
        batch_size: 100,
        lr: 0.02,
        weight_decay: 1e-4,
    };
    let mut results = serde_json::Map::new();
    for kind in [ModelKind::Dnn, ModelKind::Qnn] {
        let model = ModelArgs {
            model: kind,
            qubits: 10,
            layers: 1,
            gradient: args.gradient,
            hidden: 100,
            blocks: 3,
            k: 5,
        };
        let name = kind.to_string();
        let train_ctx = sub(&format!("{name}/train"));
        let trained = cmd_train(
            &train_ctx,
            &TrainArgs {
                data: data.clone(),
                model: model.clone(),
                optim: optim.clone(),
                epochs: 100,
                labeled: Some(fixture.source_labels),
            },
        )?;
        let checkpoint = train_ctx.out.join("model.json");
        let eval = cmd_eval(
            &sub(&format!("{name}/eval")),
            &EvalArgs {
                data: data.clone(),
                checkpoint: checkpoint.clone(),
                domain: DomainArg::Target,
            },
        )?;
        let transfer = cmd_transfer(
            &sub(&format!("{name}/transfer")),
            &TransferArgs {
                data: data.clone(),
                checkpoint,
                samples: Some(fixture.transfer_samples),
                fraction: None,
                epochs: 50,
                repeats: fixture.repeats,
                repeat_mode: RepeatArg::Resample,
                freeze: None,
                gradient: None,
                optim: optim.clone(),
            },
        )?;
        let eval_after = cmd_eval(
            &sub(&format!("{name}/eval_transfer")),
            &EvalArgs {
                data: data.clone(),
                checkpoint: ctx.out.join(format!("{name}/transfer/model_transfer.json")),
                domain: DomainArg::Target,
            },
        )?;
        let mut entry = json!({ "train": trained, "eval": eval, "transfer": transfer, "eval_transfer": eval_after });
        if !args.no_curve {
            let curve = cmd_curve(
                &sub(&format!("{name}/curve")),
                &CurveArgs {
                    data: data.clone(),
                    model,
                    optim: optim.clone(),
                    epochs: 100,
                    grid: args.grid.clone(),
                    repeats: 1,
                    eval_domain: DomainArg::Target,
                },
            )?;
            entry["curve"] = curve;
        }
        results.insert(name, entry);
    }
    let summary = Value::Object(results);
    write(&ctx.out.join("figures.json"), &pretty(&summary))?;
    Ok(summary)
}

fn run(cli: &Cli) -> Result<Value> {
    let ctx = Ctx {
        seed: cli.seed,
        deterministic: cli.deterministic,
        out: cli.out_dir.clone(),
    };
    match &cli.command {
        Command::Gen(a) => cmd_gen(&ctx, a),
        Command::Train(a) => cmd_train(&ctx, a),
        Command::Transfer(a) => cmd_transfer(&ctx, a),
        Command::Eval(a) => cmd_eval(&ctx, a),
        Command::Curve(a) => cmd_curve(&ctx, a),
        Command::MakeFigures(a) => cmd_make_figures(&ctx, a),
    }
}

fn error_document(kind: &str, message: &str) -> String {
    json!({ "error": { "kind": kind, "message": message } }).to_string()
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => e.exit(),
        Err(e) => {
            eprintln!("{}", error_document("usage", e.to_string().trim_end()));
            return ExitCode::from(2);
        }
    };
    match run(&cli) {
        Ok(summary) => {
            let _ = writeln!(std::io::stdout(), "{}", pretty(&summary));
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", error_document(e.kind(), &e.to_string()));
            ExitCode::FAILURE
        }
    }
}
