use std::io::{self, BufWriter};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use incoherence::campaign::{
    ablate, emit_ablation, emit_report, fetch_all, prepare_inputs, run_campaign, Axis, CampaignConfig, CampaignEnv,
    CampaignReport, Format, ModelEntry, ModelsFile,
};
use incoherence::runner::{CachedExecutor, Runner, RunnerConfig};
use incoherence::{Benchmark, FloatPolicy, PacParams};

#[derive(Parser)]
#[command(name = "incoherence", version, about = "Estimate the incorrectness of generated programs without an oracle")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fetch and store candidates for every model and task
    Fetch(CampaignArgs),
    /// Generate and cache fuzzed inputs for every task
    Fuzz(CampaignArgs),
    /// Run a full campaign and write reports
    Measure(CampaignArgs),
    /// Re-emit summary files from an existing report.json
    Report {
        /// Directory holding report.json
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "csv,json")]
        formats: String,
    },
    /// Repeat a campaign over values of one parameter
    Ablate {
        #[command(flatten)]
        campaign: CampaignArgs,
        /// m, n or temperature
        #[arg(long)]
        axis: Axis,
        /// Comma-separated values, e.g. 1,2,5,10
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
    },
    /// Check the estimators against exactly solvable synthetic coders
    Simulate {
        #[arg(long, default_value_t = 1000)]
        instances: usize,
        #[arg(long, default_value_t = 200)]
        runs: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Convert EvalPlus-style JSONL into a benchmark file
    Import {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[arg(long)]
        benchmark_id: String,
        /// Drop canonical solutions to get an oracle-less benchmark
        #[arg(long)]
        no_ground_truth: bool,
    },
    /// Store hand-written candidates (every *.src file in a directory) for one task
    Adopt {
        #[arg(long)]
        benchmark: PathBuf,
        #[arg(long, default_value = "cache")]
        cache: PathBuf,
        #[arg(long)]
        model: String,
        #[arg(long)]
        task: String,
        #[arg(long)]
        dir: PathBuf,
        #[arg(long, default_value = "python")]
        language: String,
    },
    /// Serve the toy candidate language over the runner protocol
    #[command(hide = true)]
    ToyShim,
}

#[derive(Args, Clone)]
struct CampaignArgs {
    #[arg(long)]
    benchmark: PathBuf,
    /// Models file (JSON with schema_version and models)
    #[arg(long)]
    models: Option<PathBuf>,
    /// Label of a model whose candidates are already in the cache; repeatable
    #[arg(long = "model")]
    model_labels: Vec<String>,
    #[arg(long, default_value_t = 10)]
    m: usize,
    #[arg(long, default_value_t = 1000)]
    n: usize,
    #[arg(long)]
    temperature: Option<f64>,
    #[arg(long, default_value_t = 0.05)]
    epsilon: f64,
    #[arg(long, default_value_t = 0.05)]
    delta: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long, default_value = "cache")]
    cache: PathBuf,
    #[arg(long, default_value_t = 4)]
    workers: usize,
    #[arg(long, default_value_t = 60.0)]
    timeout_seconds: f64,
    #[arg(long, default_value = "csv,json")]
    formats: String,
    /// Shim command for a candidate language, as LANG=COMMAND; repeatable
    #[arg(long = "shim")]
    shims: Vec<String>,
    #[arg(long, default_value_t = 1e-6)]
    rtol: f64,
    #[arg(long, default_value_t = 1e-9)]
    atol: f64,
}

fn parse_formats(s: &str) -> Result<Vec<Format>> {
    s.split(',')
        .filter(|p| !p.trim().is_empty())
        .map(|p| p.parse().map_err(anyhow::Error::msg))
        .collect()
}

fn build_runner(args: &CampaignArgs) -> Result<Runner> {
    let mut shims: Vec<(String, String)> = Vec::new();
    for s in &args.shims {
        let (lang, cmd) = s.split_once('=').with_context(|| format!("--shim {s:?} is not LANG=COMMAND"))?;
        shims.push((lang.trim().to_owned(), cmd.trim().to_owned()));
    }
    if !shims.iter().any(|(l, _)| l == incoherence::toy::LANGUAGE) {
        let exe = std::env::current_exe().context("locating the current executable")?;
        shims.push((incoherence::toy::LANGUAGE.into(), format!("{} toy-shim", exe.display())));
    }
    let mut runner = Runner::new();
    for (lang, cmd) in shims {
        let mut cfg = RunnerConfig::new(cmd);
        cfg.timeout_seconds = args.timeout_seconds;
        cfg.max_concurrent_executions = args.workers.max(1);
        runner = runner.with_language(&lang, cfg)?;
    }
    Ok(runner)
}

fn build_config(args: &CampaignArgs) -> Result<CampaignConfig> {
    let benchmark = Benchmark::load(&args.benchmark)?;
    let mut models = match &args.models {
        Some(p) => ModelsFile::load(p)?,
        None => Vec::new(),
    };
    models.extend(args.model_labels.iter().map(|label| ModelEntry {
        label: label.clone(),
        provider: None,
    }));
    if models.is_empty() {
        bail!("no models: pass --models FILE or --model LABEL");
    }
    let mut cfg = CampaignConfig::new(benchmark, models, args.out.clone(), args.cache.clone());
    cfg.m = args.m;
    cfg.n = args.n;
    cfg.temperature = args.temperature;
    cfg.pac = PacParams::new(args.epsilon, args.delta)?;
    cfg.float_policy = FloatPolicy::new(args.rtol, args.atol, true)?;
    cfg.rng_seed = args.seed;
    cfg.workers = args.workers;
    cfg.validate()?;
    Ok(cfg)
}

fn env_for(args: &CampaignArgs) -> Result<CampaignEnv> {
    Ok(CampaignEnv::new(Arc::new(build_runner(args)?)))
}

fn print_summary(report: &CampaignReport) {
    for b in &report.models {
        let f = |x: Option<f64>| x.map_or("-".to_owned(), |v| format!("{v:.4}"));
        println!(
            "{}: mean_error {} mean_incoherence {} detection_rate {} pass@1 {} ({} tasks with nonzero incoherence)",
            b.model,
            f(b.mean_error),
            f(b.mean_incoherence),
            f(b.detection_rate),
            f(b.pass_at_1),
            b.nonzero_incoherence_tasks
        );
    }
    if let Some(r) = &report.ranking {
        if let (Some(rho), Some(label)) = (r.spearman_rho, &r.label) {
            println!("ranking agreement: rho {rho:.4} ({label})");
        }
    }
    for e in &report.exclusions {
        eprintln!("excluded {} / {}: {}", e.model, e.task_id, e.reason);
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::ToyShim => {
            let stdin = io::stdin();
            incoherence::toy::serve(stdin.lock(), BufWriter::new(io::stdout()), io::stderr())?;
        }
        Command::Fetch(args) => {
            let cfg = build_config(&args)?;
            let failures = fetch_all(&cfg, &env_for(&args)?)?;
            for f in &failures {
                eprintln!("{} / {}: {}", f.model, f.task_id, f.reason);
            }
            if !failures.is_empty() {
                return Ok(ExitCode::FAILURE);
            }
        }
        Command::Fuzz(args) => {
            let cfg = build_config(&args)?;
            let runner = build_runner(&args)?;
            let exec_path = cfg.cache_dir.join("executions.jsonl");
            let cached = CachedExecutor::persistent(runner, &exec_path)?;
            for t in &cfg.benchmark.tasks {
                match prepare_inputs(&cfg, &cached, t) {
                    Ok(xs) => println!("{}: {} inputs", t.task_id, xs.len()),
                    Err(e) => eprintln!("{}: {e}", t.task_id),
                }
            }
            cached.flush()?;
        }
        Command::Measure(args) => {
            let cfg = build_config(&args)?;
            let report = run_campaign(&cfg, &env_for(&args)?)?;
            emit_report(&report, &cfg.output_dir, &parse_formats(&args.formats)?)?;
            print_summary(&report);
        }
        Command::Report { out, formats } => {
            let path = out.join("report.json");
            let text = std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
            let report: CampaignReport =
                serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
            emit_report(&report, &out, &parse_formats(&formats)?)?;
            print_summary(&report);
        }
        Command::Ablate { campaign, axis, values } => {
            let cfg = build_config(&campaign)?;
            let result = ablate(&cfg, &env_for(&campaign)?, axis, &values)?;
            let formats = parse_formats(&campaign.formats)?;
            for (r, v) in result.reports.iter().zip(&values) {
                emit_report(r, &cfg.output_dir.join(format!("{v}")), &formats)?;
            }
            let table = emit_ablation(&result, &cfg.output_dir)?;
            for row in &result.rows {
                println!(
                    "{:?}={} {}: detection_rate {}",
                    axis,
                    row.value,
                    row.model,
                    row.detection_rate.map_or("-".to_owned(), |d| format!("{d:.4}"))
                );
            }
            println!("wrote {}", table.display());
        }
        Command::Simulate { instances, runs, seed } => {
            let lines = incoherence::simulator::self_check(instances, runs, seed);
            for l in &lines {
                println!("{l}");
            }
            if lines.iter().any(|l| !l.passed) {
                return Ok(ExitCode::FAILURE);
            }
        }
        Command::Adopt {
            benchmark,
            cache,
            model,
            task,
            dir,
            language,
        } => {
            let bench = Benchmark::load(&benchmark)?;
            let t = bench
                .tasks
                .iter()
                .find(|t| t.task_id == task)
                .with_context(|| format!("task {task:?} is not in {}", benchmark.display()))?;
            let entry = ModelEntry {
                label: model.clone(),
                provider: None,
            };
            let cfg = CampaignConfig::new(bench.clone(), vec![entry.clone()], PathBuf::new(), cache);
            let set = cfg.store(&entry).import_dir(t, &dir, &language, &model)?;
            println!("{}: stored {} candidates for {model}", t.task_id, set.m());
        }
        Command::Import {
            input,
            output,
            benchmark_id,
            no_ground_truth,
        } => {
            let imported = incoherence::import::import_evalplus(&input, &benchmark_id, !no_ground_truth)?;
            for (id, reason) in &imported.skipped {
                eprintln!("skipped {id}: {reason}");
            }
            imported.benchmark.save(Path::new(&output))?;
            println!("{} tasks written to {}", imported.benchmark.tasks.len(), output.display());
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
