//! The `emonav` command-line frontend: data synthesis, training,
//! simulation, rasterization, and evaluation.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 configuration or validation
//! error. All outputs are written atomically and are byte-identical across
//! invocations with the same seeds.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

use crate::emotionctx::{heuristic_classify, EcnConfig, EcnSample};
use crate::evalkit::{self, Grouping, RunRecord};
use crate::gaitlab::{load_gaits, save_gaits, synth_gait, Emotion, GaitSequence};
use crate::intentnet::{
    baseline_predict, mse_metric_pooled, train_intent_from, BaselineKind, IntentModel,
    IntentSample, TransformerConfig,
};
use crate::navpolicy::{PolicyConfig, PolicyModel, PolicyRunner, SampleMode};
use crate::nncore::OptimizerConfig;
use crate::proxemics::rasterize;
use crate::rltrain::{
    run_episode, stage_reports_csv, train_stage, EpisodeConfig, IntentSource, StageConfig,
};
use crate::simworld::{generate_scenario, load_scenario, sample_task, Family, Scenario, World};
use crate::{Error, Result};

#[derive(Parser)]
#[command(name = "emonav", version, about = "Emotion-aware intent prediction and proxemic navigation")]
pub struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Preset {
    Desk,
    Paper,
    Tiny,
}

/// Optional JSON override file (`--config`): any subset of these fields.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct Overrides {
    learning_rate: Option<f64>,
    epochs: Option<usize>,
    batch_size: Option<usize>,
    entropy_coef: Option<f64>,
    episodes_per_update: Option<usize>,
    max_steps: Option<usize>,
    action_v: Option<Vec<f64>>,
    action_w: Option<Vec<f64>>,
}

impl Overrides {
    fn load(path: &Option<PathBuf>) -> Result<Overrides> {
        match path {
            None => Ok(Overrides::default()),
            Some(p) => {
                let text = fs::read_to_string(p)?;
                serde_json::from_str(&text)
                    .map_err(|e| Error::config(format!("config file {}: {e}", p.display())))
            }
        }
    }
}

#[derive(Args)]
struct CommonTrain {
    /// Model size preset.
    #[arg(long, value_enum, default_value = "desk")]
    preset: Preset,
    /// Base RNG seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// JSON override file.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a labeled synthetic gait dataset.
    SynthGaits {
        /// Number of sequences (balanced across the requested emotions).
        #[arg(long, default_value_t = 100)]
        n: usize,
        /// Comma-separated emotion labels (default: all four).
        #[arg(long, value_delimiter = ',')]
        emotions: Vec<String>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Frames per sequence.
        #[arg(long, default_value_t = 33)]
        frames: usize,
        #[arg(long, default_value_t = 25.0)]
        fps: f64,
        /// Output gait file (JSON lines).
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the emotion classifier on a labeled gait file.
    TrainEcn {
        /// Input gait file.
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = 30)]
        epochs: usize,
        /// Output checkpoint.
        #[arg(long)]
        out: PathBuf,
        /// Learning-curve CSV (defaults next to the checkpoint).
        #[arg(long)]
        curve: Option<PathBuf>,
        #[command(flatten)]
        common: CommonTrain,
    },
    /// Train the intent transformer on a gait file.
    TrainIntent {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = 60)]
        epochs: usize,
        #[arg(long, default_value_t = 16)]
        batch: usize,
        /// Resume from an existing checkpoint.
        #[arg(long)]
        init: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        curve: Option<PathBuf>,
        #[command(flatten)]
        common: CommonTrain,
    },
    /// Train one curriculum stage of the navigation policy.
    TrainPolicy {
        /// Curriculum stage (1–3).
        #[arg(long)]
        stage: usize,
        /// Checkpoint of the previous stage (required for stages 2 and 3).
        #[arg(long)]
        init: Option<PathBuf>,
        /// Episode budget for the stage.
        #[arg(long, default_value_t = 2000)]
        budget: usize,
        /// Feed raw scans instead of proxemics-processed ones and drop the
        /// emotion penalty (ablation).
        #[arg(long)]
        raw_scans: bool,
        #[arg(long)]
        out: PathBuf,
        /// Stage-report CSV (defaults next to the checkpoint).
        #[arg(long)]
        report: Option<PathBuf>,
        #[command(flatten)]
        common: CommonTrain,
    },
    /// Run a trained policy over seeded tasks, writing traces and metrics.
    Simulate {
        /// Scenario JSON file; mutually exclusive with --family.
        #[arg(long)]
        scenario: Option<PathBuf>,
        /// Generate a scenario family instead (A-E).
        #[arg(long)]
        family: Option<String>,
        #[arg(long)]
        policy: PathBuf,
        /// Number of seeded runs.
        #[arg(long, default_value_t = 20)]
        seeds: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Greedy (deterministic) action selection.
        #[arg(long)]
        greedy: bool,
        /// Ablation: raw scans, no emotion penalty.
        #[arg(long)]
        raw_scans: bool,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Evaluate an intent model against the five baselines.
    EvalIntent {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Millisecond slices, comma separated.
        #[arg(long, value_delimiter = ',', default_values_t = vec![80.0, 160.0, 320.0])]
        slices: Vec<f64>,
        /// Output CSV.
        #[arg(long)]
        out: PathBuf,
    },
    /// Rasterize a scenario's comfort fields into a costmap grid file.
    Rasterize {
        #[arg(long)]
        scenario: PathBuf,
        /// Simulation ticks to advance before rasterizing.
        #[arg(long, default_value_t = 0)]
        tick: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

/// Parses arguments and runs; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            // clap handles --help/--version as "errors" with success codes.
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_usage() {
                2
            } else {
                1
            }
        }
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.cmd {
        Cmd::SynthGaits { n, emotions, seed, frames, fps, out } => {
            cmd_synth_gaits(n, &emotions, seed, frames, fps, &out)
        }
        Cmd::TrainEcn { data, epochs, out, curve, common } => {
            cmd_train_ecn(&data, epochs, &out, curve.as_deref(), &common)
        }
        Cmd::TrainIntent { data, epochs, batch, init, out, curve, common } => {
            cmd_train_intent(&data, epochs, batch, init.as_deref(), &out, curve.as_deref(), &common)
        }
        Cmd::TrainPolicy { stage, init, budget, raw_scans, out, report, common } => {
            cmd_train_policy(stage, init.as_deref(), budget, raw_scans, &out, report.as_deref(), &common)
        }
        Cmd::Simulate { scenario, family, policy, seeds, seed, greedy, raw_scans, out, config } => {
            cmd_simulate(
                scenario.as_deref(),
                family.as_deref(),
                &policy,
                seeds,
                seed,
                greedy,
                raw_scans,
                &out,
                &config,
            )
        }
        Cmd::EvalIntent { model, data, slices, out } => cmd_eval_intent(&model, &data, &slices, &out),
        Cmd::Rasterize { scenario, tick, seed, out } => cmd_rasterize(&scenario, tick, seed, &out),
    }
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    let tmp = path.with_extension("tmp");
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

fn cmd_synth_gaits(n: usize, emotions: &[String], seed: u64, frames: usize, fps: f64, out: &Path) -> Result<()> {
    let emotions: Vec<Emotion> = if emotions.is_empty() {
        Emotion::ALL.to_vec()
    } else {
        emotions.iter().map(|s| Emotion::parse(s)).collect::<Result<Vec<_>>>()?
    };
    let mut seqs = Vec::with_capacity(n);
    for i in 0..n {
        let emotion = emotions[i % emotions.len()];
        seqs.push(synth_gait(emotion, seed + i as u64, frames, fps)?);
    }
    if let Some(parent) = out.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    save_gaits(out, &seqs)?;
    println!("wrote {} sequences to {}", seqs.len(), out.display());
    Ok(())
}

fn cmd_train_ecn(
    data: &Path,
    epochs: usize,
    out: &Path,
    curve: Option<&Path>,
    common: &CommonTrain,
) -> Result<()> {
    let overrides = Overrides::load(&common.config)?;
    let cfg = match common.preset {
        Preset::Paper => EcnConfig::paper(),
        _ => EcnConfig::desk(),
    };
    let gaits = load_gaits(data)?;
    if gaits.is_empty() {
        return Err(Error::config(format!("dataset {} is empty", data.display())));
    }
    let samples: Vec<EcnSample> = gaits
        .iter()
        .map(|g| EcnSample::from_sequence(g, cfg.input_width))
        .collect::<Result<Vec<_>>>()?;
    let opt = OptimizerConfig::adam_default()
        .with_learning_rate(overrides.learning_rate.unwrap_or(0.002));
    let epochs = overrides.epochs.unwrap_or(epochs);
    let (model, report) = crate::emotionctx::train_ecn(&samples, cfg, opt, epochs, common.seed)?;
    model.save(out)?;
    let mut csv = String::from("epoch,train_loss,val_accuracy\n");
    for (e, (l, a)) in report.train_loss.iter().zip(&report.val_accuracy).enumerate() {
        csv.push_str(&format!("{e},{l},{a}\n"));
    }
    let curve_path = curve.map(Path::to_path_buf).unwrap_or_else(|| out.with_extension("curve.csv"));
    write_atomic(&curve_path, csv.as_bytes())?;
    println!(
        "trained classifier: best validation accuracy {:.3}, checkpoint {}",
        report.best_val_accuracy,
        out.display()
    );
    Ok(())
}

fn cmd_train_intent(
    data: &Path,
    epochs: usize,
    batch: usize,
    init: Option<&Path>,
    out: &Path,
    curve: Option<&Path>,
    common: &CommonTrain,
) -> Result<()> {
    let overrides = Overrides::load(&common.config)?;
    let cfg = match common.preset {
        Preset::Paper => TransformerConfig::paper(),
        Preset::Tiny => TransformerConfig::toy(),
        Preset::Desk => TransformerConfig::desk(),
    };
    let gaits = load_gaits(data)?;
    if gaits.is_empty() {
        return Err(Error::config(format!("dataset {} is empty", data.display())));
    }
    let init_model = init.map(IntentModel::load).transpose()?;
    let eff_cfg = init_model.as_ref().map(|m| m.cfg).unwrap_or(cfg);
    let samples: Vec<IntentSample> = gaits
        .iter()
        .map(|g| {
            let s = IntentSample::split(g, &eff_cfg, heuristic_classify(&g.slice(0, eff_cfg.history_len))?)?;
            Ok(s)
        })
        .collect::<Result<Vec<_>>>()?;
    let opt = OptimizerConfig::adam_default()
        .with_learning_rate(overrides.learning_rate.unwrap_or(0.001));
    let epochs = overrides.epochs.unwrap_or(epochs);
    let batch = overrides.batch_size.unwrap_or(batch);
    let (model, report) = train_intent_from(init_model, &samples, eff_cfg, opt, epochs, batch, common.seed)?;
    model.save(out)?;
    let mut csv = String::from("epoch,train_loss,val_loss\n");
    for (e, (l, v)) in report.train_loss.iter().zip(&report.val_loss).enumerate() {
        csv.push_str(&format!("{e},{l},{v}\n"));
    }
    let curve_path = curve.map(Path::to_path_buf).unwrap_or_else(|| out.with_extension("curve.csv"));
    write_atomic(&curve_path, csv.as_bytes())?;
    println!(
        "trained intent model: best validation loss {:.6}, checkpoint {}",
        report.best_val_loss,
        out.display()
    );
    Ok(())
}

fn cmd_train_policy(
    stage: usize,
    init: Option<&Path>,
    budget: usize,
    raw_scans: bool,
    out: &Path,
    report_path: Option<&Path>,
    common: &CommonTrain,
) -> Result<()> {
    if !(1..=3).contains(&stage) {
        return Err(Error::config(format!("stage must be 1, 2 or 3, got {stage}")));
    }
    let overrides = Overrides::load(&common.config)?;
    let mut policy = match init {
        Some(path) => {
            let p = PolicyModel::load(path)?;
            if p.trained_stage + 1 < stage {
                return Err(Error::config(format!(
                    "stage {stage} requires a checkpoint trained through stage {}, but {} finished stage {}",
                    stage - 1,
                    path.display(),
                    p.trained_stage
                )));
            }
            p
        }
        None => {
            if stage > 1 {
                return Err(Error::config(format!(
                    "stage {stage} requires --init with the stage-{} checkpoint",
                    stage - 1
                )));
            }
            let cfg = match common.preset {
                Preset::Paper => PolicyConfig::paper(),
                Preset::Desk => PolicyConfig::desk(),
                Preset::Tiny => PolicyConfig::tiny(),
            };
            PolicyModel::new(PolicyConfig { seed: common.seed, ..cfg })?
        }
    };
    let mut stages = StageConfig::default_stages(common.seed);
    let mut cfg = stages.remove(stage - 1);
    cfg.episode_budget = budget;
    if raw_scans {
        cfg.episode.processed_scans = false;
        cfg.episode.emotion_penalty = false;
    }
    if let Some(lr) = overrides.learning_rate {
        cfg.opt = cfg.opt.with_learning_rate(lr);
    }
    if let Some(c) = overrides.entropy_coef {
        cfg.rl.entropy_coef = c;
    }
    if let Some(e) = overrides.episodes_per_update {
        cfg.rl.episodes_per_update = e;
    }
    if let Some(m) = overrides.max_steps {
        cfg.rl.max_steps = m;
    }
    let report = train_stage(&mut policy, &cfg)?;
    policy.save(out)?;
    let csv = stage_reports_csv(std::slice::from_ref(&report));
    let rp = report_path.map(Path::to_path_buf).unwrap_or_else(|| out.with_extension("stage.csv"));
    write_atomic(&rp, csv.as_bytes())?;
    println!(
        "stage {} {}: success {:.2} over {} episodes ({} updates), checkpoint {}",
        report.stage,
        if report.reached { "reached" } else { "NOT reached" },
        report.success_rate,
        report.episodes_run,
        report.updates,
        out.display()
    );
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_simulate(
    scenario_path: Option<&Path>,
    family: Option<&str>,
    policy_path: &Path,
    seeds: usize,
    seed_base: u64,
    greedy: bool,
    raw_scans: bool,
    out: &Path,
    config: &Option<PathBuf>,
) -> Result<()> {
    let overrides = Overrides::load(config)?;
    let policy = PolicyModel::load(policy_path)?;
    if let (Some(v), Some(w)) = (&overrides.action_v, &overrides.action_w) {
        if *v != policy.cfg.actions.v_levels || *w != policy.cfg.actions.w_levels {
            return Err(Error::config(
                "action set in --config does not match the checkpoint header".to_string(),
            ));
        }
    }
    let mut scenario: Scenario = match (scenario_path, family) {
        (Some(p), None) => load_scenario(p)?,
        (None, Some(f)) => generate_scenario(Family::parse(f)?, seed_base)?,
        _ => {
            return Err(Error::config("provide exactly one of --scenario or --family"));
        }
    };
    if scenario.n_beams != policy.cfg.n_beams {
        scenario.n_beams = policy.cfg.n_beams;
    }
    fs::create_dir_all(out)?;

    let episode = EpisodeConfig {
        mode: if greedy { SampleMode::Greedy } else { SampleMode::Stochastic },
        intent: IntentSource::Baseline(BaselineKind::LocalPoseConstantMotion),
        processed_scans: !raw_scans,
        emotion_penalty: !raw_scans,
        policy_tag: policy_path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default(),
        ..Default::default()
    };
    let mut runs = Vec::with_capacity(seeds);
    for i in 0..seeds {
        let seed = seed_base + i as u64;
        let (start, goal) = sample_task(&scenario, seed)?;
        let mut world = World::with_task(scenario.clone(), seed, start, goal)?;
        let mut runner = PolicyRunner::new(&policy);
        use rand::SeedableRng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xac7);
        let rollout = run_episode(&mut world, &mut runner, &episode, &mut rng)?;
        let trace_path = out.join(format!("trace_{seed}.jsonl"));
        rollout.trace.save(&trace_path)?;
        runs.push(RunRecord {
            method: episode.policy_tag.clone(),
            scenario: scenario.name.clone(),
            seed,
            metrics: evalkit::nav_metrics(&rollout.trace)?,
        });
    }
    write_atomic(&out.join("metrics.csv"), evalkit::runs_csv(&runs).as_bytes())?;
    let rows = evalkit::compare_runs(&runs, Grouping::ByMethodAndScenario)?;
    write_atomic(&out.join("summary.csv"), evalkit::groups_csv(&rows).as_bytes())?;
    print!("{}", evalkit::groups_table(&rows));
    Ok(())
}

fn cmd_eval_intent(model_path: &Path, data: &Path, slices: &[f64], out: &Path) -> Result<()> {
    let model = IntentModel::load(model_path)?;
    let cfg = model.cfg;
    let max_ms = cfg.horizon_len as f64 * 1000.0;
    let gaits = load_gaits(data)?;
    if gaits.is_empty() {
        return Err(Error::config(format!("dataset {} is empty", data.display())));
    }
    for &ms in slices {
        // fps varies per sequence; validate against the first.
        let frames = (ms * gaits[0].fps / 1000.0).round() as usize;
        if frames == 0 || frames > cfg.horizon_len {
            return Err(Error::config(format!(
                "slice {ms} ms is outside the {}-frame horizon (≤ {max_ms} ms at 1 fps)",
                cfg.horizon_len
            )));
        }
    }
    let samples: Vec<IntentSample> = gaits
        .iter()
        .map(|g| IntentSample::split(g, &cfg, heuristic_classify(&g.slice(0, cfg.history_len))?))
        .collect::<Result<Vec<_>>>()?;

    let mut csv = String::from("method,slice_ms,mse\n");
    for kind in BaselineKind::ALL {
        let pairs: Vec<(GaitSequence, GaitSequence)> = samples
            .iter()
            .map(|s| Ok((baseline_predict(kind, &s.history, cfg.horizon_len)?, s.future.clone())))
            .collect::<Result<Vec<_>>>()?;
        let m = mse_metric_pooled(&pairs, slices)?;
        for (ms, v) in slices.iter().zip(&m) {
            csv.push_str(&format!("{},{ms},{v}\n", kind.name()));
        }
    }
    let pairs: Vec<(GaitSequence, GaitSequence)> = samples
        .iter()
        .map(|s| Ok((model.decode(&s.history, &s.ctx, cfg.horizon_len)?, s.future.clone())))
        .collect::<Result<Vec<_>>>()?;
    let m = mse_metric_pooled(&pairs, slices)?;
    for (ms, v) in slices.iter().zip(&m) {
        csv.push_str(&format!("model,{ms},{v}\n"));
    }
    write_atomic(out, csv.as_bytes())?;
    print!("{csv}");
    Ok(())
}

fn cmd_rasterize(scenario_path: &Path, tick: usize, seed: u64, out: &Path) -> Result<()> {
    let scenario = load_scenario(scenario_path)?;
    let mut world = World::new(scenario, seed)?;
    for _ in 0..tick {
        world.step(0.0, 0.0);
    }
    let costmap = rasterize(&world.profiles(), &world.grid);
    if let Some(parent) = out.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    costmap.export(out)?;
    println!(
        "rasterized {} profiles onto a {}x{} grid: {}",
        world.profiles().len(),
        costmap.width(),
        costmap.height(),
        out.display()
    );
    Ok(())
}
