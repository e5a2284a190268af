use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use fairprune::data::synthetic::{credit_rows, credit_schema, CreditConfig};
use fairprune::debias::sort_dataset;
use fairprune::experiment::{emit_reports, emit_summary, read_records_csv, run_grid, GridSpec};
use fairprune::fairness::{generate_pool, metrics_report, write_pool_csv, SimilarityConfig};
use fairprune::influence::SolverMethod;
use fairprune::model::{train, training_accuracy};
use fairprune::{
    debias_data, Dataset, DebiasConfig, Error, FeatureSchema, Hyperparameters, Mlp, Result,
    SolverConfig,
};
use serde_json::json;

#[derive(Parser)]
#[command(name = "fairprune", version, about = "Find and remove training rows that drive individual discrimination")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Load a dataset and print its encoding summary
    LoadCheck(DataArgs),
    /// Train a classifier and save it as JSON
    Train {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        opts: Opts,
        /// Model file to write (defaults to <out-dir>/model.json)
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Measure individual discrimination, accuracy and parity of a model
    Discrim {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        opts: Opts,
        /// Model to evaluate; trained on the data when absent
        #[arg(long)]
        model: Option<PathBuf>,
        /// Also write the generated pool to this CSV file
        #[arg(long)]
        pool_csv: Option<PathBuf>,
    },
    /// Rank training rows by their influence on the unfair predictions
    Rank {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        opts: Opts,
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Remove the most biased rows and write the debiased dataset
    Debias {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        opts: Opts,
    },
    /// Run the hyperparameter grid comparing Full, SR and Ours
    Grid {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        opts: Opts,
        /// Number of permutation seeds, starting at --seed
        #[arg(long, default_value_t = 2)]
        permutations: u64,
        /// Use the full 3x2x2x20 grid
        #[arg(long)]
        full_grid: bool,
        #[arg(long, default_value_t = 0.8)]
        train_fraction: f64,
    },
    /// Rebuild summary.json and boxplot.csv from a configs.csv
    Report {
        #[arg(long)]
        configs: PathBuf,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
    /// Write the synthetic credit table and its schema
    Synth {
        #[arg(long, default_value_t = 1000)]
        rows: usize,
        #[arg(long, default_value_t = 0.4)]
        bias_rate: f64,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
}

#[derive(Args)]
struct DataArgs {
    /// Dataset CSV with a header row
    data: PathBuf,
    /// Schema JSON sidecar
    #[arg(long)]
    schema: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum Solver {
    Cg,
    Lissa,
}

#[derive(Args)]
struct Opts {
    #[arg(long, default_value_t = 0.0)]
    lambda: f64,
    #[arg(long, default_value_t = 100)]
    pool_multiplier: usize,
    #[arg(long, default_value_t = 1.0)]
    chunk_percent: f64,
    #[arg(long, default_value_t = 100)]
    max_chunks: usize,
    /// Weight-init, shuffling and pool seed
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// One value, or a comma-separated list for `grid`
    #[arg(long, value_delimiter = ',')]
    hidden1: Vec<usize>,
    #[arg(long, value_delimiter = ',')]
    hidden2: Vec<usize>,
    #[arg(long, value_delimiter = ',')]
    batch_size: Vec<usize>,
    #[arg(long, default_value_t = 1000)]
    epochs: usize,
    #[arg(long, default_value_t = 0.01)]
    lr: f64,
    #[arg(long, default_value_t = 0.01)]
    damping: f64,
    #[arg(long, default_value_t = 1e-6)]
    cg_tol: f64,
    #[arg(long, default_value_t = 500)]
    cg_max_iter: usize,
    #[arg(long, value_enum, default_value_t = Solver::Cg)]
    solver: Solver,
    /// Parallel grid configs; 0 uses every core
    #[arg(long, default_value_t = 0)]
    workers: usize,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    /// Measure every chunk on one fixed pool
    #[arg(long)]
    freeze_pool: bool,
}

fn single(values: &[usize], default: usize, flag: &str) -> Result<usize> {
    match values {
        [] => Ok(default),
        [v] => Ok(*v),
        _ => Err(Error::InvalidConfig(format!(
            "--{flag} takes a single value outside `grid`"
        ))),
    }
}

impl Opts {
    fn hyperparameters(&self, rows: usize) -> Result<Hyperparameters> {
        let d = Hyperparameters::default();
        let hp = Hyperparameters {
            hidden1: single(&self.hidden1, d.hidden1, "hidden1")?,
            hidden2: single(&self.hidden2, d.hidden2, "hidden2")?,
            batch_size: single(&self.batch_size, d.batch_size.min(rows.max(1)), "batch-size")?,
            epochs: self.epochs,
            learning_rate: self.lr,
            weight_init_seed: self.seed,
        };
        hp.validate()?;
        Ok(hp)
    }

    fn similarity(&self) -> SimilarityConfig {
        SimilarityConfig {
            pool_multiplier: self.pool_multiplier,
            ..SimilarityConfig::for_lambda(self.lambda, self.seed)
        }
    }

    fn solver(&self) -> SolverConfig {
        SolverConfig {
            method: match self.solver {
                Solver::Cg => SolverMethod::ConjugateGradient,
                Solver::Lissa => SolverMethod::Lissa,
            },
            damping: self.damping,
            cg_tol: self.cg_tol,
            cg_max_iter: self.cg_max_iter,
            ..SolverConfig::default()
        }
    }

    fn debias(&self, rows: usize) -> Result<DebiasConfig> {
        let cfg = DebiasConfig {
            chunk_percent: self.chunk_percent,
            max_chunks: self.max_chunks,
            similarity: self.similarity(),
            hp: self.hyperparameters(rows)?,
            solver: self.solver(),
            freeze_pool: self.freeze_pool,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

fn load(args: &DataArgs) -> Result<Dataset> {
    let schema = FeatureSchema::from_path(&args.schema)?;
    Dataset::load(&args.data, &schema)
}

fn model_for(d: &Dataset, opts: &Opts, path: Option<&Path>) -> Result<Mlp> {
    match path {
        Some(p) => Mlp::load(p),
        None => train(d, &opts.hyperparameters(d.len())?),
    }
}

fn print(value: serde_json::Value) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(&value)?);
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::LoadCheck(args) => {
            let d = load(&args)?;
            let positives = d.labels().iter().filter(|&&y| y == 1).count();
            let blocks: Vec<_> = d
                .layout()
                .blocks()
                .iter()
                .map(|b| json!({"name": b.name, "offset": b.offset, "width": b.width()}))
                .collect();
            print(json!({
                "rows": d.len(),
                "width": d.width(),
                "positives": positives,
                "negatives": d.len() - positives,
                "sensitive_values": d.sensitive_values(),
                "blocks": blocks,
                "norm_params": d.norm_params(),
            }))
        }
        Command::Train { data, opts, model } => {
            let d = load(&data)?;
            let m = train(&d, &opts.hyperparameters(d.len())?)?;
            let path = model.unwrap_or_else(|| opts.out_dir.join("model.json"));
            if let Some(dir) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
                fs::create_dir_all(dir)?;
            }
            m.save(&path)?;
            print(json!({
                "model": path,
                "final_loss": m.training_log().map(|l| l.final_loss),
                "training_accuracy": training_accuracy(&m, &d)?,
            }))
        }
        Command::Discrim {
            data,
            opts,
            model,
            pool_csv,
        } => {
            let d = load(&data)?;
            let m = model_for(&d, &opts, model.as_deref())?;
            let sim = opts.similarity();
            sim.validate()?;
            if let Some(path) = pool_csv {
                let pool = generate_pool(&d, &sim, 0)?;
                write_pool_csv(d.layout(), &pool, fs::File::create(path)?)?;
            }
            print(serde_json::to_value(metrics_report(&m, &d, &d, &sim, 0)?)?)
        }
        Command::Rank { data, opts, model } => {
            let d = load(&data)?;
            let cfg = opts.debias(d.len())?;
            let m = model_for(&d, &opts, model.as_deref())?;
            let ranking = sort_dataset(&d, &m, &cfg)?;
            fs::create_dir_all(&opts.out_dir)?;
            let csv = opts.out_dir.join("ranking.csv");
            ranking.write_csv(fs::File::create(&csv)?)?;
            let diag = opts.out_dir.join("diagnostics.json");
            fs::write(&diag, ranking.diagnostics_json()? + "\n")?;
            print(json!({
                "ranking": csv,
                "diagnostics": diag,
                "influence_set_size": ranking.diagnostics.influence_set_size,
                "converged": ranking.diagnostics.all_converged(),
                "top": ranking.row_ids().iter().take(10).collect::<Vec<_>>(),
            }))
        }
        Command::Debias { data, opts } => {
            let d = load(&data)?;
            let cfg = opts.debias(d.len())?;
            let out = debias_data(&d, &cfg, train)?;
            fs::create_dir_all(&opts.out_dir)?;
            let csv = opts.out_dir.join("debiased.csv");
            out.dataset.save_csv(&csv)?;
            let report = opts.out_dir.join("report.json");
            fs::write(&report, out.report.to_json()? + "\n")?;
            let model = opts.out_dir.join("model.json");
            out.model.save(&model)?;
            print(json!({
                "debiased": csv,
                "report": report,
                "model": model,
                "rows_before": d.len(),
                "rows_after": out.dataset.len(),
                "stop_index": out.report.stop_index,
                "already_fair": out.report.already_fair,
                "loop_exhausted": out.report.loop_exhausted,
                "removed_row_ids": out.report.removed_row_ids,
            }))
        }
        Command::Grid {
            data,
            opts,
            permutations,
            full_grid,
            train_fraction,
        } => {
            let base = if full_grid {
                GridSpec::full_grid()
            } else {
                GridSpec {
                    permutation_seeds: (opts.seed..opts.seed + permutations).collect(),
                    ..GridSpec::default()
                }
            };
            let spec = GridSpec {
                hidden1: if opts.hidden1.is_empty() { base.hidden1.clone() } else { opts.hidden1.clone() },
                hidden2: if opts.hidden2.is_empty() { base.hidden2.clone() } else { opts.hidden2.clone() },
                batch_sizes: opts.batch_size.clone(),
                lambda: opts.lambda,
                pool_multiplier: opts.pool_multiplier,
                train_fraction,
                chunk_percent: opts.chunk_percent,
                max_chunks: opts.max_chunks,
                epochs: opts.epochs,
                learning_rate: opts.lr,
                solver: opts.solver(),
                freeze_pool: opts.freeze_pool,
                workers: opts.workers,
                dataset: Some(data.data.clone()),
                schema: Some(data.schema.clone()),
                ..base
            };
            let result = run_grid(&spec)?;
            let files = emit_reports(&result, &opts.out_dir)?;
            print(json!({
                "configs_csv": files.configs_csv,
                "summary_json": files.summary_json,
                "boxplot_csv": files.boxplot_csv,
                "records": result.records.len(),
                "failures": result.failures,
                "unfair_points": result.unfair_points.len(),
            }))
        }
        Command::Report { configs, out_dir } => {
            let records = read_records_csv(fs::File::open(&configs)?)?;
            let (summary, boxplot) = emit_summary(&records, &[], 0, &out_dir)?;
            print(json!({"summary_json": summary, "boxplot_csv": boxplot, "records": records.len()}))
        }
        Command::Synth {
            rows,
            bias_rate,
            seed,
            out_dir,
        } => {
            let cfg = CreditConfig {
                rows,
                bias_rate,
                seed,
                ..CreditConfig::default()
            };
            let schema = credit_schema();
            let records = credit_rows(&cfg)?;
            fs::create_dir_all(&out_dir)?;
            let csv_path = out_dir.join("credit.csv");
            let mut text = schema
                .columns
                .iter()
                .map(|c| c.name.as_str())
                .collect::<Vec<_>>()
                .join(",");
            text.push('\n');
            for r in &records {
                text.push_str(&r.values.join(","));
                text.push('\n');
            }
            fs::write(&csv_path, text)?;
            let schema_path = out_dir.join("credit.schema.json");
            fs::write(&schema_path, schema.to_json()? + "\n")?;
            print(json!({
                "data": csv_path,
                "schema": schema_path,
                "rows": records.len(),
                "biased_rows": records.iter().filter(|r| r.biased).count(),
            }))
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprintln!(
                "{}",
                json!({"error": "UsageError", "message": e.render().to_string()})
            );
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", json!({"error": e.kind(), "message": e.to_string()}));
            ExitCode::FAILURE
        }
    }
}
