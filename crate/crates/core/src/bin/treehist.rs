use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use tree_history::experiments::{self, ExperimentConfig, ExperimentError, Graph};
use tree_history::posterior::{self, DEFAULT_SAMPLES};
use tree_history::root::{confidence_set, format_sig, log_hist_counts, write_posterior_csv};
use tree_history::sampling::{importance_sample_batch, sample_batch, write_samples, SamplerKind};
use tree_history::{rng, AttachmentKernel, LabeledTree};

#[derive(Parser)]
#[command(name = "treehist", version, about = "Infer the growth history of a tree from its shape")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Grow a random tree and write PREFIX.parents, PREFIX.edges and PREFIX.meta.
    Generate {
        #[command(flatten)]
        growth: Growth,
        /// Output path prefix.
        #[arg(long)]
        out: PathBuf,
    },
    /// Root posterior and confidence sets for an observed tree.
    InferRoot {
        input: PathBuf,
        #[command(flatten)]
        levels: Levels,
        #[command(flatten)]
        output: Output,
    },
    /// Empirical coverage of the root confidence sets on simulated trees.
    Coverage {
        #[command(flatten)]
        study: Study,
        /// Also write the per-trial log as CSV.
        #[arg(long)]
        trial_log: Option<PathBuf>,
    },
    /// Confidence set sizes on simulated trees, with the worst-case bound.
    Sizes {
        #[command(flatten)]
        study: Study,
    },
    /// Posterior of one node's arrival time.
    Arrival {
        input: PathBuf,
        /// Label of the node.
        #[arg(long)]
        node: String,
        #[arg(long, default_value_t = 0.05)]
        eps: f64,
        #[command(flatten)]
        mc: MonteCarlo,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Draw histories uniformly, or importance-weighted under a kernel.
    Sample {
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = Sampler::Fast)]
        sampler: Sampler,
        #[command(flatten)]
        mc: MonteCarlo,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Posterior over the set of the first K nodes.
    SeedTree {
        input: PathBuf,
        /// Seed size.
        #[arg(long)]
        k: usize,
        #[command(flatten)]
        mc: MonteCarlo,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Root inference on random spanning trees of a general graph.
    MstRoot {
        input: PathBuf,
        #[arg(long, default_value_t = 200)]
        trials: usize,
        /// Known source label, to report coverage.
        #[arg(long)]
        true_root: Option<String>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        levels: Levels,
        #[command(flatten)]
        output: Output,
    },
    /// Worst-case confidence set sizes for uniform and linear attachment.
    Bounds {
        #[command(flatten)]
        levels: Levels,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare history counts against brute-force enumeration.
    OracleCheck {
        /// Check this tree instead of random ones.
        input: Option<PathBuf>,
        /// Largest random tree size.
        #[arg(long, default_value_t = 8)]
        n: usize,
        #[arg(long, default_value_t = 200)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Args)]
struct Growth {
    /// uniform, linear, affine:A,B, dreg:D, sublinear:G or table:W1,...
    #[arg(long, default_value = "uniform")]
    kernel: AttachmentKernel,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct Levels {
    /// Error level; repeat for several sets.
    #[arg(long = "eps", default_values_t = [0.05])]
    eps: Vec<f64>,
}

#[derive(Args)]
struct Output {
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Args)]
struct Study {
    #[command(flatten)]
    growth: Growth,
    #[arg(long, default_value_t = 200)]
    trials: usize,
    #[command(flatten)]
    levels: Levels,
    #[command(flatten)]
    output: Output,
}

#[derive(Args)]
struct MonteCarlo {
    #[arg(long, default_value_t = DEFAULT_SAMPLES)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Growth model to weight histories by; uniform weights if omitted.
    #[arg(long)]
    kernel: Option<AttachmentKernel>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum Sampler {
    Forward,
    Fast,
    Backward,
}

impl From<Sampler> for SamplerKind {
    fn from(s: Sampler) -> Self {
        match s {
            Sampler::Forward => SamplerKind::Forward,
            Sampler::Fast => SamplerKind::Fast,
            Sampler::Backward => SamplerKind::Backward,
        }
    }
}

fn read_tree(path: &Path) -> Result<LabeledTree, ExperimentError> {
    LabeledTree::read_edge_list(path).map_err(|e| ExperimentError::Data(format!("{}: {e}", path.display())))
}

fn study_config(s: &Study) -> ExperimentConfig {
    ExperimentConfig {
        kernel: s.growth.kernel.clone(),
        n: s.growth.n,
        trials: s.trials,
        epsilons: s.levels.eps.clone(),
        seed: s.growth.seed,
    }
}

fn run(cli: Cli) -> Result<(), ExperimentError> {
    match cli.command {
        Command::Generate { growth, out } => {
            if growth.n == 0 {
                return Err(ExperimentError::Usage("--n must be at least 1".into()));
            }
            let g = experiments::generate(&growth.kernel, growth.n, &mut rng::seeded(growth.seed))?;
            experiments::write_generated(&out, &g, &growth.kernel, growth.seed)
        }
        Command::InferRoot { input, levels, output } => {
            experiments::check_epsilons(&levels.eps)?;
            let tree = read_tree(&input)?;
            let post = log_hist_counts(&tree);
            let sets: Vec<_> = levels.eps.iter().map(|&e| confidence_set(&post, e)).collect();
            for (e, s) in levels.eps.iter().zip(&sets) {
                eprintln!(
                    "eps={} level={} size={} mass={}",
                    format_sig(*e, 12),
                    format_sig(s.level, 12),
                    s.len(),
                    format_sig(s.achieved_mass, 12)
                );
            }
            let text = match output.format {
                Format::Csv => {
                    let mut buf = Vec::with_capacity(tree.len() * 48);
                    write_posterior_csv(&mut buf, &tree, &post, &sets)?;
                    String::from_utf8(buf).expect("labels are utf-8")
                }
                Format::Json => experiments::posterior_json(&tree, &post, &sets),
            };
            experiments::emit(output.out.as_deref(), &text)
        }
        Command::Coverage { study, trial_log } => {
            let report = experiments::run_coverage(&study_config(&study))?;
            if let Some(p) = trial_log {
                std::fs::write(p, experiments::trial_log_csv(&report))?;
            }
            let text = match study.output.format {
                Format::Csv => experiments::coverage_csv(&report),
                Format::Json => experiments::report_json(&report),
            };
            experiments::emit(study.output.out.as_deref(), &text)
        }
        Command::Sizes { study } => {
            let report = experiments::run_coverage(&study_config(&study))?;
            let text = match study.output.format {
                Format::Csv => experiments::sizes_csv(&report),
                Format::Json => experiments::report_json(&report),
            };
            experiments::emit(study.output.out.as_deref(), &text)
        }
        Command::Arrival { input, node, eps, mc, out } => {
            experiments::check_epsilons(&[eps])?;
            let tree = read_tree(&input)?;
            let post = log_hist_counts(&tree);
            let arrival = posterior::arrival_time_posterior_with(&tree, &post, &node, mc.samples, mc.seed, mc.kernel.as_ref())?;
            let set = posterior::arrival_time_confidence_set(&arrival, eps);
            experiments::emit(out.as_deref(), &(posterior::arrival_json(&tree, &arrival, &set) + "\n"))
        }
        Command::Sample { input, sampler, mc, out } => {
            if mc.samples == 0 {
                return Err(ExperimentError::Usage("--samples must be at least 1".into()));
            }
            let tree = read_tree(&input)?;
            let post = log_hist_counts(&tree);
            let samples = match mc.kernel.as_ref().filter(|k| !k.is_shape_exchangeable()) {
                Some(k) => importance_sample_batch(&tree, &post, k, mc.samples, mc.seed)?,
                None => sample_batch(&tree, &post, sampler.into(), mc.samples, mc.seed),
            };
            let mut buf = Vec::with_capacity(samples.len() * tree.len() * 8);
            write_samples(&mut buf, &tree, &samples)?;
            experiments::emit(out.as_deref(), std::str::from_utf8(&buf).expect("labels are utf-8"))
        }
        Command::SeedTree { input, k, mc, out } => {
            let tree = read_tree(&input)?;
            let post = log_hist_counts(&tree);
            let seeds = posterior::seed_tree_posterior_with(&tree, &post, k, mc.samples, mc.seed, mc.kernel.as_ref())?;
            experiments::emit(out.as_deref(), &(posterior::seed_tree_json(&tree, &seeds) + "\n"))
        }
        Command::MstRoot { input, trials, true_root, seed, levels, output } => {
            experiments::check_epsilons(&levels.eps)?;
            let graph = Graph::read(&input)?;
            let report = experiments::run_mst_root(&graph, trials, &levels.eps, seed, true_root.as_deref())?;
            let text = match output.format {
                Format::Csv => experiments::coverage_csv(&report),
                Format::Json => experiments::report_json(&report),
            };
            experiments::emit(output.out.as_deref(), &text)
        }
        Command::Bounds { levels, out } => experiments::emit(out.as_deref(), &experiments::bounds_csv(&levels.eps)?),
        Command::OracleCheck { input, n, trials, seed } => {
            let report = match input {
                Some(p) => {
                    let tree = read_tree(&p)?;
                    let mut r = experiments::OracleCheck { trees: 0, nodes: 0, mismatches: Vec::new() };
                    experiments::oracle_check_tree(&tree, &mut r)?;
                    r
                }
                None => experiments::oracle_check_random(n, trials, seed)?,
            };
            for m in &report.mismatches {
                eprintln!("mismatch: {m}");
            }
            println!("trees={} nodes={} mismatches={}", report.trees, report.nodes, report.mismatches.len());
            if report.mismatches.is_empty() {
                Ok(())
            } else {
                Err(ExperimentError::Data("history counts disagree with enumeration".into()))
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("treehist: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
