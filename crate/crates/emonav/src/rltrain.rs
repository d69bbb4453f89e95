//! Reward computation, episode rollouts, REINFORCE policy-gradient updates
//! with a moving-average baseline, and the three-stage curriculum.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::evalkit;
use crate::gaitlab::{Emotion, GaitSequence};
use crate::intentnet::{baseline_predict, BaselineKind, IntentModel};
use crate::navpolicy::{
    compose_traj_image, PolicyInput, PolicyModel, PolicyRunner, SampleMode,
};
use crate::nncore::{Optimizer, OptimizerConfig, ParamStore, Tape, TapeParams, TensorId};
use crate::proxemics::process_scan;
use crate::simworld::{
    generate_scenario, sample_task, Event, Family, HumanSpec, HumanTick, ScanFrame,
    Trace, TraceMeta, TraceTick, World,
};
use crate::{Error, Result};

// ── Rewards ─────────────────────────────────────────────────────────

/// Reward constants. Defaults are the reference values; `xi` is the goal
/// radius and `w_threshold` the rotational speed above which the
/// smoothness penalty applies.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RewardConfig {
    pub r_arrival: f64,
    pub w_g: f64,
    pub r_collision: f64,
    pub w_w: f64,
    pub r_e: f64,
    pub xi: f64,
    pub w_threshold: f64,
}

impl Default for RewardConfig {
    fn default() -> Self {
        RewardConfig {
            r_arrival: 15.0,
            w_g: 2.5,
            r_collision: -15.0,
            w_w: -0.1,
            r_e: -2.5,
            xi: 0.1,
            w_threshold: 0.7,
        }
    }
}

/// Per-component reward of one transition.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct RewardParts {
    pub goal: f64,
    pub collision: f64,
    pub smooth: f64,
    pub emotion: f64,
}

impl RewardParts {
    pub fn total(&self) -> f64 {
        self.goal + self.collision + self.smooth + self.emotion
    }
}

/// Reward of one step: arrival bonus or distance shaping, collision
/// penalty, rotational smoothness penalty, and one emotion penalty per
/// human whose emotion turned negative this step.
pub fn reward(
    prev_goal_dist: f64,
    goal_dist: f64,
    w_cmd: f64,
    collided: bool,
    reached: bool,
    emotion_transitions: usize,
    cfg: &RewardConfig,
) -> RewardParts {
    RewardParts {
        goal: if reached { cfg.r_arrival } else { cfg.w_g * (prev_goal_dist - goal_dist) },
        collision: if collided { cfg.r_collision } else { 0.0 },
        smooth: if w_cmd.abs() > cfg.w_threshold { cfg.w_w * w_cmd.abs() } else { 0.0 },
        emotion: cfg.r_e * emotion_transitions as f64,
    }
}

/// Re-evaluates the reward components of every tick of a logged trace from
/// positions, events, and emotion edges alone. Exact replay of the values
/// logged by [`run_episode`].
pub fn replay_rewards(trace: &Trace, cfg: &RewardConfig) -> Vec<RewardParts> {
    let mut out = Vec::with_capacity(trace.ticks.len());
    let goal = trace.meta.goal;
    let mut prev = (trace.meta.start.x, trace.meta.start.y);
    let mut prev_emotions: Option<Vec<(usize, Emotion)>> = None;
    for tick in &trace.ticks {
        let prev_dist = ((prev.0 - goal.0).powi(2) + (prev.1 - goal.1).powi(2)).sqrt();
        let dist = ((tick.x - goal.0).powi(2) + (tick.y - goal.1).powi(2)).sqrt();
        let collided = tick.events.iter().any(|e| e == "collision");
        let reached = tick.events.iter().any(|e| e == "goal_reached");
        let transitions = match &prev_emotions {
            None => 0,
            Some(prev_e) => tick
                .humans
                .iter()
                .filter(|h| {
                    prev_e
                        .iter()
                        .find(|(id, _)| *id == h.id)
                        .map(|(_, e)| !e.is_negative() && h.emotion.is_negative())
                        .unwrap_or(false)
                })
                .count(),
        };
        // The emotion penalty may be disabled in ablations; detect that
        // from the logged component being zero despite transitions.
        let mut parts = reward(prev_dist, dist, tick.w, collided, reached, transitions, cfg);
        if tick.r_emotion == 0.0 && parts.emotion != 0.0 {
            parts.emotion = 0.0;
        }
        out.push(parts);
        prev = (tick.x, tick.y);
        prev_emotions = Some(tick.humans.iter().map(|h| (h.id, h.emotion)).collect());
    }
    out
}

// ── Rollouts ────────────────────────────────────────────────────────

/// RL hyperparameters.
#[derive(Clone, Copy, Debug)]
pub struct RLConfig {
    pub gamma: f64,
    pub episodes_per_update: usize,
    pub max_steps: usize,
    /// Moving-average baseline smoothing factor.
    pub baseline_beta: f64,
    pub entropy_coef: f64,
    pub seed: u64,
}

impl Default for RLConfig {
    fn default() -> Self {
        RLConfig {
            gamma: 0.99,
            episodes_per_update: 8,
            max_steps: 400,
            baseline_beta: 0.1,
            entropy_coef: 0.01,
            seed: 0,
        }
    }
}

impl RLConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0 < self.gamma && self.gamma < 1.0) {
            return Err(Error::config("gamma must lie in (0,1)"));
        }
        if self.episodes_per_update == 0 || self.max_steps == 0 {
            return Err(Error::config("episodes_per_update and max_steps must be positive"));
        }
        Ok(())
    }
}

/// One logged step of an episode.
#[derive(Clone, Debug)]
pub struct Transition {
    pub input: PolicyInput,
    pub action: usize,
    pub reward: RewardParts,
    pub total: f64,
    pub done: bool,
    pub event: Option<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Outcome {
    Goal,
    Collision,
    Timeout,
}

/// A full episode: transitions for learning plus the trace for metrics.
#[derive(Clone, Debug)]
pub struct Rollout {
    pub transitions: Vec<Transition>,
    pub trace: Trace,
    pub outcome: Outcome,
}

impl Rollout {
    pub fn total_return(&self) -> f64 {
        self.transitions.iter().map(|t| t.total).sum()
    }

    /// Discounted returns `G_t = r_t + γ·G_{t+1}`.
    pub fn returns(&self, gamma: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.transitions.len()];
        let mut acc = 0.0;
        for (i, t) in self.transitions.iter().enumerate().rev() {
            acc = t.total + gamma * acc;
            out[i] = acc;
        }
        out
    }

    /// Learning view: `(input, action, total reward)` per step.
    pub fn steps(&self) -> Vec<(PolicyInput, usize, f64)> {
        self.transitions.iter().map(|t| (t.input.clone(), t.action, t.total)).collect()
    }
}

/// Where the predicted half of each trajectory image comes from.
pub enum IntentSource {
    /// Histories only; no prediction appended.
    HistoryOnly,
    /// A closed-form baseline predictor.
    Baseline(BaselineKind),
    /// The trained transformer (uses each pedestrian's current context).
    Model(Box<IntentModel>),
}

/// Per-episode settings.
pub struct EpisodeConfig {
    pub mode: SampleMode,
    pub intent: IntentSource,
    /// Feed proxemics-processed scans (false = raw scans ablation).
    pub processed_scans: bool,
    /// Apply the emotion penalty r_e.
    pub emotion_penalty: bool,
    pub reward: RewardConfig,
    /// Predicted frames appended to each pedestrian's history.
    pub intent_horizon: usize,
    pub policy_tag: String,
}

impl Default for EpisodeConfig {
    fn default() -> Self {
        EpisodeConfig {
            mode: SampleMode::Stochastic,
            intent: IntentSource::Baseline(BaselineKind::LocalPoseConstantMotion),
            processed_scans: true,
            emotion_penalty: true,
            reward: RewardConfig::default(),
            intent_horizon: 8,
            policy_tag: "policy".to_string(),
        }
    }
}

fn human_sequence(world: &World, idx: usize) -> Option<GaitSequence> {
    let h = &world.humans[idx];
    if h.gait_buffer.len() < 2 {
        return None;
    }
    let frames: Vec<_> = h.gait_buffer.iter().copied().collect();
    GaitSequence::new(format!("human-{}", h.id), 1.0 / world.scenario.dt, Some(h.emotion), frames).ok()
}

/// Builds the policy input for the current world state.
fn build_input(
    world: &World,
    scans: &[ScanFrame],
    cfg: &EpisodeConfig,
    image_side: usize,
) -> Result<PolicyInput> {
    let pose = world.robot.pose;
    // Pedestrians within sensor range, nearest first.
    let mut order: Vec<(usize, f64)> = world
        .humans
        .iter()
        .enumerate()
        .map(|(i, h)| {
            let (hx, hy) = h.position();
            (i, ((hx - pose.x).powi(2) + (hy - pose.y).powi(2)).sqrt())
        })
        .filter(|(_, d)| *d <= world.scenario.max_range)
        .collect();
    order.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap());

    let mut seqs = Vec::new();
    for (i, _) in &order {
        let Some(hist) = human_sequence(world, *i) else {
            continue;
        };
        let full = match &cfg.intent {
            IntentSource::HistoryOnly => hist,
            IntentSource::Baseline(kind) => {
                let pred = baseline_predict(*kind, &hist, cfg.intent_horizon)?;
                hist.extended(&pred)
            }
            IntentSource::Model(model) => {
                let resampled = crate::gaitlab::resample(&hist, model.cfg.history_len)?;
                let pred = model.decode(&resampled, &world.humans[*i].ctx, cfg.intent_horizon)?;
                hist.extended(&pred)
            }
        };
        seqs.push(full);
    }
    Ok(PolicyInput {
        traj_image: compose_traj_image(&seqs, image_side)?,
        scans: scans.to_vec(),
        v_prev: (world.robot.v, world.robot.w),
        goal: world.goal,
        robot_pose: pose,
    })
}

/// Runs one episode: builds the policy input (three-scan window plus
/// intent-concatenated trajectories), samples actions, steps the world,
/// and accumulates rewards. Terminates on goal, collision, or timeout.
pub fn run_episode(
    world: &mut World,
    runner: &mut PolicyRunner,
    cfg: &EpisodeConfig,
    rng: &mut ChaCha8Rng,
) -> Result<Rollout> {
    let side = runner.model.cfg.image_side;
    let actions = runner.model.cfg.actions.clone();
    let meta = TraceMeta {
        scenario: world.scenario.name.clone(),
        seed: world.scenario.seed,
        dt: world.scenario.dt,
        start: world.robot.pose,
        goal: world.goal,
        goal_radius: world.scenario.goal_radius,
        policy: cfg.policy_tag.clone(),
    };
    let mut transitions = Vec::new();
    let mut ticks = Vec::new();
    let mut outcome = Outcome::Timeout;

    let prox = *world.proxemics_config();
    let make_scan = |world: &World| -> Result<ScanFrame> {
        let raw = world.scan();
        if cfg.processed_scans {
            process_scan(&raw, &world.profiles(), prox.tau, prox.scan_step, world.robot.pose)
        } else {
            Ok(raw)
        }
    };

    let first = make_scan(world)?;
    let mut scans = vec![first.clone(), first.clone(), first];

    loop {
        let input = build_input(world, &scans, cfg, side)?;
        let action = runner.act(&input, cfg.mode, rng)?;
        let (v, w) = actions.action(action);

        let prev_dist = world.goal_distance();
        let events = world.step(v, w);
        let dist = world.goal_distance();

        let collided = events.contains(&Event::Collision);
        let reached = events.contains(&Event::GoalReached);
        let timeout = events.contains(&Event::Timeout);
        let transitions_n = events
            .iter()
            .filter(|e| matches!(e, Event::EmotionShift { .. }))
            .count();
        let mut parts = reward(
            prev_dist,
            dist,
            w,
            collided,
            reached,
            if cfg.emotion_penalty { transitions_n } else { 0 },
            &cfg.reward,
        );
        if !cfg.emotion_penalty {
            parts.emotion = 0.0;
        }
        let done = collided || reached || timeout;
        if reached {
            outcome = Outcome::Goal;
        } else if collided {
            outcome = Outcome::Collision;
        }

        let event_tags: Vec<String> = events.iter().map(Event::tag).collect();
        ticks.push(TraceTick {
            t: world.tick - 1,
            x: world.robot.pose.x,
            y: world.robot.pose.y,
            theta: world.robot.pose.theta,
            v,
            w,
            action,
            humans: world
                .humans
                .iter()
                .map(|h| HumanTick {
                    id: h.id,
                    x: h.state.x,
                    y: h.state.y,
                    theta: h.state.theta,
                    emotion: h.emotion,
                    comfort: h.state.comfort,
                })
                .collect(),
            r_goal: parts.goal,
            r_collision: parts.collision,
            r_smooth: parts.smooth,
            r_emotion: parts.emotion,
            r_total: parts.total(),
            events: event_tags.clone(),
            done,
        });
        transitions.push(Transition {
            input,
            action,
            reward: parts,
            total: parts.total(),
            done,
            event: event_tags.first().cloned(),
        });

        if done {
            break;
        }
        let next = make_scan(world)?;
        scans.remove(0);
        scans.push(next);
    }

    Ok(Rollout { transitions, trace: Trace { meta, ticks }, outcome })
}

// ── Policy gradient ─────────────────────────────────────────────────

/// Anything REINFORCE can train: a network mapping inputs to action
/// logits, backed by a parameter store.
pub trait PolicyNetwork {
    type Input;

    fn build_logits(&self, tape: &mut Tape, tp: &TapeParams, input: &Self::Input) -> Result<TensorId>;
    fn params(&self) -> &ParamStore;
    fn params_mut(&mut self) -> &mut ParamStore;
}

impl PolicyNetwork for PolicyModel {
    type Input = PolicyInput;

    fn build_logits(&self, tape: &mut Tape, tp: &TapeParams, input: &PolicyInput) -> Result<TensorId> {
        self.logits(tape, tp, input, None)
    }

    fn params(&self) -> &ParamStore {
        &self.params
    }

    fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }
}

/// Moving-average return baseline.
#[derive(Clone, Copy, Debug)]
pub struct MovingBaseline {
    pub value: f64,
    pub beta: f64,
    initialized: bool,
}

impl MovingBaseline {
    pub fn new(beta: f64) -> MovingBaseline {
        MovingBaseline { value: 0.0, beta, initialized: false }
    }

    pub fn update(&mut self, mean_return: f64) {
        if self.initialized {
            self.value = (1.0 - self.beta) * self.value + self.beta * mean_return;
        } else {
            self.value = mean_return;
            self.initialized = true;
        }
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct UpdateStats {
    pub mean_return: f64,
    pub mean_entropy: f64,
    pub loss: f64,
    pub transitions: usize,
}

/// REINFORCE loss of one episode given fixed per-step advantages:
/// `Σ_t [−log π(a_t)·adv_t − c_H·H_t] · scale`.
pub fn policy_gradient_loss<P: PolicyNetwork>(
    policy: &P,
    tape: &mut Tape,
    tp: &TapeParams,
    steps: &[(P::Input, usize, f64)],
    entropy_coef: f64,
    scale: f64,
) -> Result<TensorId> {
    let mut terms = Vec::with_capacity(steps.len() * 2);
    for (input, action, adv) in steps {
        let logits = policy.build_logits(tape, tp, input)?;
        let logp = tape.log_softmax_rows(logits)?;
        let picked = tape.select(logp, *action)?;
        terms.push(tape.mul_scalar(picked, -adv * scale)?);
        if entropy_coef != 0.0 {
            let p = tape.softmax_rows(logits)?;
            let plogp = tape.mul(p, logp)?;
            let neg_h = tape.sum_all(plogp)?; // −H
            terms.push(tape.mul_scalar(neg_h, entropy_coef * scale)?);
        }
    }
    let mut acc = terms[0];
    for t in &terms[1..] {
        acc = tape.add(acc, *t)?;
    }
    Ok(acc)
}

/// One REINFORCE update over a batch of episodes: advantages are the
/// discounted returns minus the moving-average baseline; the loss is
/// averaged over all transitions; gradients accumulate per episode and a
/// single optimizer step applies them. The baseline updates after the
/// gradient is taken.
pub fn policy_gradient_update<P: PolicyNetwork>(
    policy: &mut P,
    episodes: &[Vec<(P::Input, usize, f64)>],
    opt: &mut Optimizer,
    cfg: &RLConfig,
    baseline: &mut MovingBaseline,
) -> Result<UpdateStats> {
    cfg.validate()?;
    if episodes.is_empty() || episodes.iter().all(|e| e.is_empty()) {
        return Err(Error::config("policy update needs at least one non-empty rollout"));
    }
    let n_transitions: usize = episodes.iter().map(|e| e.len()).sum();
    let scale = 1.0 / n_transitions as f64;

    // Per-episode discounted returns and advantages.
    let mut mean_return = 0.0;
    let mut adv_steps: Vec<Vec<(&P::Input, usize, f64)>> = Vec::with_capacity(episodes.len());
    for ep in episodes {
        let mut acc = 0.0;
        let mut returns = vec![0.0; ep.len()];
        for (i, (_, _, r)) in ep.iter().enumerate().rev() {
            acc = r + cfg.gamma * acc;
            returns[i] = acc;
        }
        if let Some(g0) = returns.first() {
            mean_return += g0;
        }
        adv_steps.push(
            ep.iter()
                .zip(&returns)
                .map(|((input, action, _), g)| (input, *action, g - baseline.value))
                .collect(),
        );
    }
    mean_return /= episodes.len() as f64;

    policy.params_mut().zero_grads();
    let mut loss_total = 0.0;
    let mut entropy_total = 0.0;
    for steps in &adv_steps {
        let mut tape = Tape::new();
        let tp = policy.params().inject(&mut tape)?;
        let mut terms = Vec::with_capacity(steps.len() * 2);
        for (input, action, adv) in steps {
            let logits = policy.build_logits(&mut tape, &tp, input)?;
            let logp = tape.log_softmax_rows(logits)?;
            let picked = tape.select(logp, *action)?;
            terms.push(tape.mul_scalar(picked, -adv * scale)?);
            let p = tape.softmax_rows(logits)?;
            let plogp = tape.mul(p, logp)?;
            let neg_h = tape.sum_all(plogp)?;
            entropy_total += -tape.scalar(neg_h);
            if cfg.entropy_coef != 0.0 {
                terms.push(tape.mul_scalar(neg_h, cfg.entropy_coef * scale)?);
            }
        }
        let mut acc = terms[0];
        for t in &terms[1..] {
            acc = tape.add(acc, *t)?;
        }
        tape.backward(acc)?;
        policy.params_mut().accumulate_grads(&tape, &tp)?;
        loss_total += tape.scalar(acc);
    }
    opt.step(policy.params_mut())?;
    baseline.update(mean_return);

    Ok(UpdateStats {
        mean_return,
        mean_entropy: entropy_total / n_transitions as f64,
        loss: loss_total,
        transitions: n_transitions,
    })
}

// ── Curriculum ──────────────────────────────────────────────────────

/// Configuration of one curriculum stage.
pub struct StageConfig {
    pub stage: usize,
    pub families: Vec<Family>,
    pub episode_budget: usize,
    /// Updates between evaluation checks.
    pub eval_every: usize,
    /// Episodes in the quick screening eval.
    pub quick_eval_episodes: usize,
    /// Episodes in the full (reported) eval.
    pub eval_episodes: usize,
    pub success_threshold: f64,
    /// Remove scripted pedestrians from generated scenarios.
    pub strip_humans: bool,
    /// Guarantee at least one pedestrian per scenario.
    pub ensure_humans: bool,
    pub episode: EpisodeConfig,
    pub rl: RLConfig,
    pub opt: OptimizerConfig,
    pub seed: u64,
}

impl StageConfig {
    /// The three reference stages: empty rooms, obstacle maps, then
    /// pedestrians with proxemic constraints — with descending
    /// success thresholds (0.9 / 0.8 / 0.7).
    pub fn default_stages(seed: u64) -> Vec<StageConfig> {
        let opt = OptimizerConfig::rmsprop_default().with_learning_rate(2e-3);
        let mk_episode = || EpisodeConfig::default();
        vec![
            StageConfig {
                stage: 1,
                families: vec![Family::A],
                episode_budget: 3000,
                eval_every: 10,
                quick_eval_episodes: 25,
                eval_episodes: 100,
                success_threshold: 0.9,
                strip_humans: true,
                ensure_humans: false,
                episode: mk_episode(),
                rl: RLConfig { max_steps: 250, seed, ..RLConfig::default() },
                opt,
                seed,
            },
            StageConfig {
                stage: 2,
                families: vec![Family::B, Family::C, Family::D, Family::E],
                episode_budget: 3000,
                eval_every: 10,
                quick_eval_episodes: 25,
                eval_episodes: 100,
                success_threshold: 0.8,
                strip_humans: true,
                ensure_humans: false,
                episode: mk_episode(),
                rl: RLConfig { max_steps: 300, seed: seed ^ 0x2, ..RLConfig::default() },
                opt,
                seed: seed ^ 0x2,
            },
            StageConfig {
                stage: 3,
                families: vec![Family::C, Family::E],
                episode_budget: 3000,
                eval_every: 10,
                quick_eval_episodes: 25,
                eval_episodes: 100,
                success_threshold: 0.7,
                strip_humans: false,
                ensure_humans: true,
                episode: mk_episode(),
                rl: RLConfig { max_steps: 400, seed: seed ^ 0x3, ..RLConfig::default() },
                opt,
                seed: seed ^ 0x3,
            },
        ]
    }
}

/// Outcome of one stage.
#[derive(Clone, Debug)]
pub struct StageReport {
    pub stage: usize,
    pub episodes_run: usize,
    pub updates: usize,
    pub success_rate: f64,
    pub mean_return: f64,
    pub mean_delta_ps: f64,
    /// Whether the stage met its success criterion within budget.
    pub reached: bool,
}

/// CSV for stage reports: (stage, episodes, success_rate, mean_return,
/// mean_delta_ps, reached).
pub fn stage_reports_csv(reports: &[StageReport]) -> String {
    let mut out = String::from("stage,episodes,success_rate,mean_return,mean_delta_ps,reached\n");
    for r in reports {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.stage, r.episodes_run, r.success_rate, r.mean_return, r.mean_delta_ps, r.reached
        ));
    }
    out
}

fn build_stage_world(cfg: &StageConfig, episode_idx: u64, eval: bool, n_beams: usize) -> Result<World> {
    let mut rng = ChaCha8Rng::seed_from_u64(
        cfg.seed ^ episode_idx.wrapping_mul(0x9e37) ^ if eval { 0xeeee_0000_0000 } else { 0 },
    );
    let family = cfg.families[rng.gen_range(0..cfg.families.len())];
    let scen_seed = rng.gen::<u64>() ^ if eval { 0x5eed_e000 } else { 0 };
    let mut scenario = generate_scenario(family, scen_seed)?;
    if cfg.strip_humans {
        scenario.humans.clear();
    }
    if cfg.ensure_humans && scenario.humans.is_empty() {
        let grid = scenario.rasterize_obstacles();
        let mut tries = 0;
        while scenario.humans.is_empty() && tries < 50 {
            tries += 1;
            let a = (rng.gen_range(1.0..scenario.width - 1.0), rng.gen_range(1.0..scenario.height - 1.0));
            let b = (rng.gen_range(1.0..scenario.width - 1.0), rng.gen_range(1.0..scenario.height - 1.0));
            if !grid.disc_collides(a.0, a.1, 0.4) && !grid.disc_collides(b.0, b.1, 0.4) {
                scenario.humans.push(HumanSpec {
                    waypoints: vec![a, b],
                    speed: rng.gen_range(0.4..0.9),
                    emotion: Emotion::ALL[rng.gen_range(0..4)],
                    cyclic: true,
                heading: None,
                });
            }
        }
    }
    scenario.max_steps = cfg.rl.max_steps;
    scenario.n_beams = n_beams;
    let task_seed = rng.gen::<u64>();
    let (start, goal) = sample_task(&scenario, task_seed)?;
    World::with_task(scenario, rng.gen::<u64>(), start, goal)
}

/// Aggregate results of a greedy held-out evaluation.
#[derive(Clone, Copy, Debug)]
pub struct StageEval {
    pub episodes: usize,
    pub success_rate: f64,
    pub mean_return: f64,
    pub mean_delta_ps: f64,
    pub collisions: usize,
}

/// Greedy evaluation over `n` held-out scenarios.
pub fn evaluate_stage(policy: &PolicyModel, cfg: &StageConfig, n: usize) -> Result<StageEval> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0xe7a1);
    let mut successes = 0;
    let mut collisions = 0;
    let mut total_return = 0.0;
    let mut total_dps = 0.0;
    let eval_episode = EpisodeConfig {
        mode: SampleMode::Greedy,
        intent: clone_intent(&cfg.episode.intent),
        processed_scans: cfg.episode.processed_scans,
        emotion_penalty: cfg.episode.emotion_penalty,
        reward: cfg.episode.reward,
        intent_horizon: cfg.episode.intent_horizon,
        policy_tag: format!("stage{}-eval", cfg.stage),
    };
    for i in 0..n {
        let mut world = build_stage_world(cfg, 1_000_000 + i as u64, true, policy.cfg.n_beams)?;
        let mut runner = PolicyRunner::new(policy);
        let rollout = run_episode(&mut world, &mut runner, &eval_episode, &mut rng)?;
        match rollout.outcome {
            Outcome::Goal => successes += 1,
            Outcome::Collision => collisions += 1,
            Outcome::Timeout => {}
        }
        total_return += rollout.total_return();
        total_dps += evalkit::delta_ps(&rollout.trace);
    }
    Ok(StageEval {
        episodes: n,
        success_rate: successes as f64 / n as f64,
        mean_return: total_return / n as f64,
        mean_delta_ps: total_dps / n as f64,
        collisions,
    })
}

fn clone_intent(src: &IntentSource) -> IntentSource {
    match src {
        IntentSource::HistoryOnly => IntentSource::HistoryOnly,
        IntentSource::Baseline(k) => IntentSource::Baseline(*k),
        IntentSource::Model(m) => IntentSource::Model(m.clone()),
    }
}

/// Trains one curriculum stage until its success criterion or episode
/// budget is exhausted. Returns an explicit report either way; a stage
/// that never reaches its criterion reports `reached = false`.
pub fn train_stage(policy: &mut PolicyModel, cfg: &StageConfig) -> Result<StageReport> {
    cfg.rl.validate()?;
    let mut opt = Optimizer::new(cfg.opt)?;
    let mut baseline = MovingBaseline::new(cfg.rl.baseline_beta);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rl.seed ^ 0xac710);
    let mut episodes_run = 0usize;
    let mut updates = 0usize;
    let mut reached = false;

    while episodes_run < cfg.episode_budget {
        let mut batch = Vec::with_capacity(cfg.rl.episodes_per_update);
        for _ in 0..cfg.rl.episodes_per_update {
            if episodes_run >= cfg.episode_budget {
                break;
            }
            let mut world = build_stage_world(cfg, episodes_run as u64, false, policy.cfg.n_beams)?;
            let mut runner = PolicyRunner::new(policy);
            let rollout = run_episode(&mut world, &mut runner, &cfg.episode, &mut rng)?;
            episodes_run += 1;
            batch.push(rollout.steps());
        }
        if batch.is_empty() {
            break;
        }
        policy_gradient_update(policy, &batch, &mut opt, &cfg.rl, &mut baseline)?;
        policy.version += 1;
        updates += 1;

        if updates % cfg.eval_every == 0 {
            let quick = evaluate_stage(policy, cfg, cfg.quick_eval_episodes)?;
            if quick.success_rate >= cfg.success_threshold {
                let full = evaluate_stage(policy, cfg, cfg.eval_episodes)?;
                if full.success_rate >= cfg.success_threshold {
                    reached = true;
                    break;
                }
            }
        }
    }

    let eval = evaluate_stage(policy, cfg, cfg.eval_episodes)?;
    let reached = reached || eval.success_rate >= cfg.success_threshold;
    if reached {
        policy.trained_stage = policy.trained_stage.max(cfg.stage);
    }
    Ok(StageReport {
        stage: cfg.stage,
        episodes_run,
        updates,
        success_rate: eval.success_rate,
        mean_return: eval.mean_return,
        mean_delta_ps: eval.mean_delta_ps,
        reached,
    })
}

/// Runs stages in order, each warm-starting from the previous stage's
/// weights. Stage k+1 only runs when stage k reached its criterion; the
/// returned reports make a stage failure explicit instead of silently
/// continuing.
pub fn curriculum_train(policy: &mut PolicyModel, stages: &[StageConfig]) -> Result<Vec<StageReport>> {
    let mut reports: Vec<StageReport> = Vec::with_capacity(stages.len());
    for (i, stage) in stages.iter().enumerate() {
        if i > 0 && !reports[i - 1].reached {
            break;
        }
        reports.push(train_stage(policy, stage)?);
    }
    Ok(reports)
}
