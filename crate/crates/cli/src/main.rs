use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use mitonet::bundler::{export_rollout, rollout, Emulator, RolloutConfig, RolloutIc, RolloutMeta};
use mitonet::experiment::{
    generate, random_search, run_experiment, ExperimentConfig, Pipeline, Protocol, SearchSpace, SearchTarget,
};
use mitonet::opnet::Variant;
use mitonet::{Error, Result};

#[derive(Parser)]
#[command(name = "mitonet", version, about = "Latent operator emulation of 1D shallow-water runs")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Experiment config (TOML). Defaults to the built-in toy tidal setup.
    #[arg(long, short, global = true)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides the report directory.
    #[arg(long, short, global = true)]
    output: Option<PathBuf>,
    /// Artifact cache directory [default: <output>/cache].
    #[arg(long, global = true)]
    cache: Option<PathBuf>,
    /// Regenerate data and retrain models without touching any cache.
    #[arg(long, global = true)]
    no_cache: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Print the resolved config as TOML.
    Config,
    /// Simulate every friction value the split references.
    Generate,
    /// Train (or load) the autoencoder of each variable.
    TrainAe {
        #[arg(long = "variable", short = 'v')]
        variables: Vec<String>,
    },
    /// Train (or load) an operator model.
    TrainOp {
        #[arg(long, default_value = "MITONet")]
        model: String,
        #[arg(long = "variable", short = 'v')]
        variables: Vec<String>,
        /// Bundle size [default: operator.tau].
        #[arg(long)]
        tau: Option<usize>,
    },
    /// Roll a trained model out on a test run and export the predicted field.
    Rollout(RolloutArgs),
    /// Hot-start rollouts over the base and long horizons.
    Evaluate,
    /// MITONet against the configured baselines.
    Compare,
    /// One MITONet per lookforward window.
    Lookforward,
    /// Start from the rest state with single-step hand-off.
    Coldstart,
    /// Short hot-start rollouts from random test positions.
    HotstartSegments,
    /// Uniform random hyperparameter search.
    Search {
        #[arg(long, value_enum, default_value_t = Target::Operator)]
        target: Target,
        #[arg(long, default_value = "H")]
        variable: String,
        #[arg(long, default_value_t = 20)]
        trials: usize,
        /// Epochs per trial.
        #[arg(long, default_value_t = 20)]
        epochs: usize,
        /// Search space (TOML); defaults to the built-in ranges.
        #[arg(long)]
        space: Option<PathBuf>,
    },
}

#[derive(Args)]
struct RolloutArgs {
    #[arg(long, default_value = "MITONet")]
    model: String,
    #[arg(long, short = 'v', default_value = "H")]
    variable: String,
    /// Test friction value [default: every test r].
    #[arg(long)]
    r: Option<f64>,
    /// Start index [default: the test start].
    #[arg(long)]
    start: Option<usize>,
    /// Rollout length [default: protocol.horizon].
    #[arg(long)]
    steps: Option<usize>,
    /// Steps adopted per model call [default: operator.tau_infer].
    #[arg(long)]
    tau_infer: Option<usize>,
    /// Start from the zero latent instead of the true state.
    #[arg(long)]
    cold: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Target {
    Autoencoder,
    Operator,
}

impl Global {
    fn load(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(o) = &self.output {
            cfg.output_dir = o.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn cache_dir(&self, cfg: &ExperimentConfig) -> Option<PathBuf> {
        if self.no_cache {
            return None;
        }
        Some(self.cache.clone().unwrap_or_else(|| cfg.output_dir.join("cache")))
    }
}

fn variables(cfg: &ExperimentConfig, requested: &[String]) -> Result<Vec<String>> {
    if requested.is_empty() {
        return Ok(cfg.data.variables.clone());
    }
    for v in requested {
        if !cfg.data.variables.contains(v) {
            return Err(Error::argument(format!("variable `{v}` is not generated by this config")));
        }
    }
    Ok(requested.to_vec())
}

fn protocol(cfg: &ExperimentConfig, cache: Option<&Path>, p: Protocol) -> Result<()> {
    let report = run_experiment(cfg, &[p], cache)?;
    for e in &report.entries {
        println!(
            "{:<10} {:<4} r={:<6} {:<6} acc={:.4} rmse={:.4e} nrmse={:.4e}",
            e.model, e.variable, e.r, e.window, e.metrics.acc, e.metrics.mean_rmse, e.metrics.mean_nrmse
        );
    }
    println!("report written to {}", cfg.output_dir.display());
    Ok(())
}

fn run_rollout(pipe: &mut Pipeline, args: &RolloutArgs) -> Result<()> {
    let cfg = pipe.cfg.clone();
    let variant: Variant = args.model.parse()?;
    let var = &args.variable;
    variables(&cfg, std::slice::from_ref(var))?;
    let ae = pipe.autoencoder(var)?.clone();
    let (model, hash): (Box<dyn Emulator>, String) = match variant {
        Variant::Mitonet => {
            let m = pipe.mitonet(var, cfg.operator.tau)?.clone();
            let h = m.hash()?;
            (Box::new(m), h)
        }
        v => {
            let m = pipe.baseline(v, var)?.clone();
            let h = m.hash()?;
            (Box::new(m), h)
        }
    };
    let start = args.start.unwrap_or(pipe.split.test_start);
    let horizon = args.steps.unwrap_or(cfg.protocol.horizon);
    let tau_infer = args.tau_infer.unwrap_or(cfg.operator.tau_infer).min(model.tau());
    let sets: Vec<_> = pipe.split.test.iter().filter(|s| args.r.map_or(true, |r| s.r == r)).cloned().collect();
    if sets.is_empty() {
        return Err(Error::argument("no test run matches the requested r"));
    }
    let dir = cfg.output_dir.join("rollouts");
    for set in sets {
        if set.n_t() < start + horizon + 1 {
            return Err(Error::argument(format!("test run has {} steps, rollout needs {}", set.n_t(), start + horizon + 1)));
        }
        let ic = if args.cold {
            RolloutIc::ZeroLatent
        } else {
            RolloutIc::Physical(set.columns(var, start, start + 1)?.remove(0))
        };
        let rc = RolloutConfig { horizon, tau_infer, reencode: false };
        let out = rollout(model.as_ref(), Some(&ae), ic, &set.bc_series, start, set.r, &rc)?;
        let meta = RolloutMeta {
            variable: var.clone(),
            model: variant.to_string(),
            r: set.r,
            tau: model.tau(),
            tau_infer,
            start,
            horizon,
            seed: cfg.seed,
            model_hash: hash.clone(),
            model_calls: out.model_calls,
        };
        let bc = set.bc_series.iter().map(|s| s[start + 1..=start + horizon].to_vec()).collect();
        let stem = format!("{}_{var}_r{}_s{start}_h{horizon}", variant.to_string().to_lowercase(), set.r);
        let (snap, _) = export_rollout(&out, &meta, set.scenario, set.dt_hours, bc, &dir, &stem)?;
        println!("r={} calls={} -> {}", set.r, out.model_calls, snap.display());
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let cfg = cli.global.load()?;
    let cache = cli.global.cache_dir(&cfg);
    let cache = cache.as_deref();
    match cli.command {
        Command::Config => print!("{}", cfg.to_toml()?),
        Command::Generate => {
            let data = generate(&cfg, cache)?;
            for (set, secs) in data.sets.iter().zip(&data.seconds) {
                let how = secs.map_or("cached".to_string(), |s| format!("{s:.2}s"));
                println!("r={} steps={} ({how})", set.r, set.n_t());
            }
        }
        Command::TrainAe { variables: vars } => {
            let mut pipe = Pipeline::prepare(&cfg, cache)?;
            for v in variables(&cfg, &vars)? {
                let n_r = pipe.autoencoder(&v)?.n_r();
                println!("autoencoder {v}: n_r={n_r}");
            }
        }
        Command::TrainOp { model, variables: vars, tau } => {
            let variant: Variant = model.parse()?;
            let mut pipe = Pipeline::prepare(&cfg, cache)?;
            for v in variables(&cfg, &vars)? {
                let hash = match variant {
                    Variant::Mitonet => pipe.mitonet(&v, tau.unwrap_or(cfg.operator.tau))?.hash()?,
                    b => pipe.baseline(b, &v)?.hash()?,
                };
                println!("{variant} {v}: {hash}");
            }
            for (name, h) in &pipe.histories {
                println!("{name}: best val {:?}", h.best_val());
            }
        }
        Command::Rollout(args) => {
            let mut pipe = Pipeline::prepare(&cfg, cache)?;
            run_rollout(&mut pipe, &args)?;
        }
        Command::Evaluate => protocol(&cfg, cache, Protocol::Evaluate)?,
        Command::Compare => protocol(&cfg, cache, Protocol::Compare)?,
        Command::Lookforward => protocol(&cfg, cache, Protocol::Lookforward)?,
        Command::Coldstart => protocol(&cfg, cache, Protocol::Coldstart)?,
        Command::HotstartSegments => protocol(&cfg, cache, Protocol::HotstartSegments)?,
        Command::Search { target, variable, trials, epochs, space } => {
            let space = match space {
                Some(p) => {
                    let text = std::fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?;
                    toml::from_str::<SearchSpace>(&text).map_err(|e| Error::config(e.to_string()))?
                }
                None => SearchSpace::default(),
            };
            let target = match target {
                Target::Autoencoder => SearchTarget::Autoencoder,
                Target::Operator => SearchTarget::Operator,
            };
            let res = random_search(&cfg, &space, target, &variable, trials, epochs, cfg.seed)?;
            let dir = cfg.output_dir.join("search");
            res.export(&dir)?;
            let best = &res.trials[res.best_trial];
            println!("best trial {} val loss {:e}; written to {}", best.index, best.val_loss, dir.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
