//! Imitation learning: alternate policy exploration with teacher labelling, then fit the
//! network to the labelled state memory with minibatch Adam.

mod rollout;

use std::collections::HashSet;
use std::io::Write;
use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::asnet::{batch_loss, init_params, AdamConfig, AdamState, AsnetError, BatchItem, Hyper, InitScheme, InputFeatures, ParameterStore, ProblemNet};
use crate::ppddl::GroundProblem;
use crate::relatedness::{schema_signature, FeatureFlags};
use crate::ssp::State;
use crate::teachers::{Teacher, TeacherConfig, TeacherError, TeacherStatus};

pub use rollout::{choose_action, run_policy, ExecMode, RolloutOutcome, RolloutRecord};

#[derive(Debug, thiserror::Error)]
pub enum TrainError {
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("no training problems")]
    NoProblems,
    #[error("training problems come from different domains")]
    MixedDomains,
    #[error("teacher timed out on every training state")]
    TeacherUnavailable,
    #[error(transparent)]
    Teacher(#[from] TeacherError),
    #[error(transparent)]
    Network(#[from] AsnetError),
}

/// From `epoch` on (1-based), train with `learning_rate`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LrStep {
    pub epoch: usize,
    pub learning_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    /// Proposition layers.
    pub layers: usize,
    pub d_h: usize,
    pub trajectories_per_epoch: usize,
    /// Minibatch updates per epoch.
    pub train_iters: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub lr_schedule: Vec<LrStep>,
    pub l2: f64,
    pub l1: f64,
    pub dropout: f64,
    /// Consecutive successful epochs required to stop early.
    pub stop_epochs: usize,
    pub p_solved: f64,
    /// Seconds.
    pub max_wall_time: f64,
    pub max_epochs: Option<usize>,
    pub step_limit: usize,
    pub teacher: TeacherConfig,
    pub flags: FeatureFlags,
    pub init: InitScheme,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            layers: 2,
            d_h: 16,
            trajectories_per_epoch: 70,
            train_iters: 700,
            batch_size: 64,
            learning_rate: 1e-3,
            lr_schedule: Vec::new(),
            l2: 2e-4,
            l1: 0.0,
            dropout: 0.1,
            stop_epochs: 20,
            p_solved: 1.0,
            max_wall_time: 7200.0,
            max_epochs: None,
            step_limit: 300,
            teacher: TeacherConfig::default(),
            flags: FeatureFlags::default(),
            init: InitScheme::GlorotUniform,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: &str| Err(TrainError::InvalidConfig(m.to_string()));
        if self.layers == 0 || self.d_h == 0 {
            return bad("layers and d_h must be positive");
        }
        if self.trajectories_per_epoch == 0 || self.train_iters == 0 || self.batch_size == 0 || self.stop_epochs == 0 || self.step_limit == 0 {
            return bad("trajectory, iteration, batch, stop and step counts must be positive");
        }
        let lr_ok = |x: f64| x > 0.0 && x.is_finite();
        if !lr_ok(self.learning_rate) || !self.lr_schedule.iter().all(|s| lr_ok(s.learning_rate)) {
            return bad("learning rates must be positive");
        }
        if !(self.l2 >= 0.0 && self.l1 >= 0.0) {
            return bad("regulariser weights must be non-negative");
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad("dropout must lie in [0, 1)");
        }
        if !(self.p_solved > 0.0 && self.p_solved <= 1.0) {
            return bad("p_solved must lie in (0, 1]");
        }
        if !(self.max_wall_time >= 0.0) {
            return bad("max_wall_time must be non-negative");
        }
        self.teacher.validate()?;
        Ok(())
    }

    pub fn hyper(&self) -> Hyper {
        Hyper {
            layers: self.layers,
            d_h: self.d_h,
            flags: self.flags,
        }
    }

    pub fn learning_rate_at(&self, epoch: usize) -> f64 {
        self.lr_schedule
            .iter()
            .filter(|s| s.epoch <= epoch)
            .max_by_key(|s| s.epoch)
            .map_or(self.learning_rate, |s| s.learning_rate)
    }
}

/// L1-regularised training followed by hard pruning of small weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SparseTrainConfig {
    pub train: TrainConfig,
    pub prune_threshold: f64,
}

impl Default for SparseTrainConfig {
    fn default() -> Self {
        SparseTrainConfig {
            train: TrainConfig {
                l1: 1e-2,
                l2: 0.0,
                dropout: 0.0,
                learning_rate: 1e-2,
                lr_schedule: vec![
                    LrStep {
                        epoch: 30,
                        learning_rate: 1e-3,
                    },
                    LrStep {
                        epoch: 40,
                        learning_rate: 1e-4,
                    },
                ],
                max_wall_time: 4.0 * 7200.0,
                ..TrainConfig::default()
            },
            prune_threshold: 1e-2,
        }
    }
}

/// A labelled training example.
#[derive(Debug, Clone, PartialEq)]
pub struct MemoryEntry {
    pub features: InputFeatures,
    /// Per action index; only enabled actions can be labelled.
    pub labels: Vec<bool>,
    /// Teacher Q-values of the enabled actions.
    pub q: Vec<(usize, f64)>,
}

#[derive(Debug, Clone, Default)]
pub struct ProblemMemory {
    pub entries: Vec<MemoryEntry>,
    seen: HashSet<(State, Vec<u32>)>,
}

/// Labelled states per training problem, deduplicated on (state, action counts).
#[derive(Debug, Clone, Default)]
pub struct StateMemory {
    pub problems: Vec<ProblemMemory>,
}

impl StateMemory {
    pub fn new(n: usize) -> StateMemory {
        StateMemory {
            problems: vec![ProblemMemory::default(); n],
        }
    }

    pub fn len(&self) -> usize {
        self.problems.iter().map(|p| p.entries.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn entries(&self) -> impl Iterator<Item = (usize, &MemoryEntry)> {
        self.problems.iter().enumerate().flat_map(|(i, p)| p.entries.iter().map(move |e| (i, e)))
    }
}

/// Minibatch share of each problem: equal split, remainder to lower indices, empty
/// memories skipped.
pub fn batch_shares(sizes: &[usize], batch_size: usize) -> Vec<usize> {
    let live: Vec<usize> = (0..sizes.len()).filter(|&i| sizes[i] > 0).collect();
    let mut shares = vec![0; sizes.len()];
    if live.is_empty() {
        return shares;
    }
    let base = batch_size / live.len();
    let rem = batch_size % live.len();
    for (k, &i) in live.iter().enumerate() {
        shares[i] = base + (k < rem) as usize;
    }
    shares
}

/// Policy rollouts per problem in one exploration phase.
pub fn explore_budget(trajectories: usize, problems: usize) -> usize {
    trajectories.div_ceil(problems.max(1))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochReport {
    /// 1-based.
    pub epoch: usize,
    /// Per problem, goal flags of this epoch's policy rollouts (empty in the first epoch).
    pub rollout_success: Vec<Vec<bool>>,
    pub success_rate: Option<f64>,
    pub memory_size: usize,
    pub mean_loss: Option<f64>,
    pub learning_rate: f64,
    pub teacher_invocations: usize,
    pub timeouts: usize,
    pub dead_ends: usize,
    /// Seconds since training started.
    pub wall_time: f64,
}

impl EpochReport {
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("report serialises")
    }

    pub fn write_json_line<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        writeln!(w, "{}", self.to_json_line())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    EarlyStop,
    WallTime,
    MaxEpochs,
}

#[derive(Debug)]
pub struct TrainOutcome {
    pub store: ParameterStore,
    pub log: Vec<EpochReport>,
    pub stop: StopReason,
    pub memory: StateMemory,
    pub teacher_invocations: usize,
}

/// A training problem: its network instance and teacher.
#[derive(Debug)]
pub struct TrainingProblem {
    pub net: ProblemNet,
    pub teacher: Teacher,
}

#[derive(Default)]
struct LabelStats {
    timeouts: usize,
    dead_ends: usize,
    labelled: usize,
}

impl TrainingProblem {
    /// Labels `s` and stores it unless already present; returns the verdict status.
    fn add(&self, mem: &mut ProblemMemory, s: &State, counts: &[u32], stats: &mut LabelStats) -> Result<(), TrainError> {
        let gp = &self.net.gp;
        if gp.is_goal(s) {
            return Ok(());
        }
        let counts_key = if self.net.extractor.flags.history { counts.to_vec() } else { Vec::new() };
        let key = (s.clone(), counts_key);
        if mem.seen.contains(&key) {
            return Ok(());
        }
        let v = self.teacher.q_values(s)?;
        match v.status {
            TeacherStatus::Timeout => stats.timeouts += 1,
            TeacherStatus::DeadEnd => {
                stats.dead_ends += 1;
                mem.seen.insert(key);
            }
            TeacherStatus::Ok => {
                stats.labelled += 1;
                let mut labels = vec![false; gp.num_actions()];
                for (&a, &y) in v.actions.iter().zip(&v.labels) {
                    labels[a] = y;
                }
                mem.entries.push(MemoryEntry {
                    features: self.net.features(s, counts),
                    labels,
                    q: v.actions.iter().copied().zip(v.q.iter().copied()).collect(),
                });
                mem.seen.insert(key);
            }
        }
        Ok(())
    }

    /// Stores `s` and every state of a teacher rollout from it.
    fn add_with_teacher_rollout(&self, mem: &mut ProblemMemory, s: &State, counts: &[u32], rng: &mut ChaCha8Rng, stats: &mut LabelStats) -> Result<(), TrainError> {
        self.add(mem, s, counts, stats)?;
        if self.net.gp.is_goal(s) {
            return Ok(());
        }
        let traj = self.teacher.rollout(s, rng);
        let mut c = counts.to_vec();
        for (i, st) in traj.states.iter().enumerate() {
            if i > 0 {
                self.add(mem, st, &c, stats)?;
            }
            if let Some(&a) = traj.actions.get(i) {
                c[a] += 1;
            }
        }
        Ok(())
    }
}

/// Training state: the live store, optimiser moments, memory and problems.
pub struct Trainer {
    pub cfg: TrainConfig,
    pub store: ParameterStore,
    pub adam: AdamState,
    pub problems: Vec<TrainingProblem>,
    pub memory: StateMemory,
    pub epoch: usize,
    rng: ChaCha8Rng,
    started: Instant,
}

impl Trainer {
    pub fn new(problems: &[Arc<GroundProblem>], cfg: TrainConfig) -> Result<Trainer, TrainError> {
        cfg.validate()?;
        let first = problems.first().ok_or(TrainError::NoProblems)?;
        let sig = schema_signature(&first.domain);
        if problems.iter().any(|gp| schema_signature(&gp.domain) != sig) {
            return Err(TrainError::MixedDomains);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let store = init_params(&sig, cfg.hyper(), &mut rng, cfg.init);
        Trainer::with_store(problems, cfg, store, rng)
    }

    fn with_store(problems: &[Arc<GroundProblem>], cfg: TrainConfig, store: ParameterStore, rng: ChaCha8Rng) -> Result<Trainer, TrainError> {
        let mut tps = Vec::with_capacity(problems.len());
        for gp in problems {
            let mut tcfg = cfg.teacher.clone();
            tcfg.step_limit = cfg.step_limit;
            tps.push(TrainingProblem {
                net: ProblemNet::new(gp.clone(), &store)?,
                teacher: Teacher::new(gp.clone(), tcfg)?,
            });
        }
        Ok(Trainer {
            adam: AdamState::new(&store.params),
            memory: StateMemory::new(tps.len()),
            problems: tps,
            store,
            epoch: 0,
            rng,
            started: Instant::now(),
            cfg,
        })
    }

    pub fn elapsed(&self) -> f64 {
        self.started.elapsed().as_secs_f64()
    }

    fn out_of_time(&self) -> bool {
        self.elapsed() >= self.cfg.max_wall_time
    }

    pub fn teacher_invocations(&self) -> usize {
        self.problems.iter().map(|p| p.teacher.cache.invocations()).sum()
    }

    /// One exploration phase followed by one training phase.
    pub fn train_epoch(&mut self) -> Result<EpochReport, TrainError> {
        self.epoch += 1;
        let first_epoch = self.epoch == 1;
        let n = self.problems.len();
        let mut stats = LabelStats::default();
        let mut rollout_success = vec![Vec::new(); n];
        if first_epoch {
            let seeds: Vec<u64> = (0..n).map(|_| self.rng.gen()).collect();
            let results: Vec<Result<LabelStats, TrainError>> = self
                .problems
                .par_iter()
                .zip(self.memory.problems.par_iter_mut())
                .zip(seeds)
                .map(|((p, mem), seed)| {
                    let mut st = LabelStats::default();
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    let s0 = p.net.gp.s0.clone();
                    p.add_with_teacher_rollout(mem, &s0, &vec![0; p.net.gp.num_actions()], &mut rng, &mut st)?;
                    Ok(st)
                })
                .collect();
            merge_stats(&mut stats, results)?;
        } else {
            let budget = explore_budget(self.cfg.trajectories_per_epoch, n);
            let mut total = 0;
            for round in 0..budget {
                let take = if round == 0 { n } else { n.min(self.cfg.trajectories_per_epoch.saturating_sub(total)) };
                if take == 0 {
                    break;
                }
                let seeds: Vec<(u64, u64)> = (0..take).map(|_| (self.rng.gen(), self.rng.gen())).collect();
                let store = &self.store;
                let cfg = &self.cfg;
                let results: Vec<Result<(bool, LabelStats), TrainError>> = self.problems[..take]
                    .par_iter()
                    .zip(self.memory.problems[..take].par_iter_mut())
                    .zip(seeds)
                    .map(|((p, mem), (explore_seed, teach_seed))| {
                        let mut rng = ChaCha8Rng::seed_from_u64(explore_seed);
                        let s0 = p.net.gp.s0.clone();
                        let rec = run_policy(store, &p.net, &s0, &mut rng, cfg.step_limit, ExecMode::Sample)?;
                        let mut st = LabelStats::default();
                        let mut trng = ChaCha8Rng::seed_from_u64(teach_seed);
                        for (s, c) in rec.states.iter().zip(&rec.counts) {
                            p.add_with_teacher_rollout(mem, s, c, &mut trng, &mut st)?;
                        }
                        if rec.outcome == RolloutOutcome::DeadEnd {
                            st.dead_ends += 1;
                        }
                        Ok((rec.reached_goal(), st))
                    })
                    .collect();
                for (i, r) in results.into_iter().enumerate() {
                    let (ok, st) = r?;
                    rollout_success[i].push(ok);
                    stats.timeouts += st.timeouts;
                    stats.dead_ends += st.dead_ends;
                    stats.labelled += st.labelled;
                }
                total += take;
                if total >= self.cfg.trajectories_per_epoch {
                    break;
                }
            }
        }
        if self.memory.is_empty() && stats.timeouts > 0 && stats.labelled == 0 {
            return Err(TrainError::TeacherUnavailable);
        }
        let lr = self.cfg.learning_rate_at(self.epoch);
        let mean_loss = self.train_phase(lr)?;
        let attempts: usize = rollout_success.iter().map(Vec::len).sum();
        let successes: usize = rollout_success.iter().flatten().filter(|&&x| x).count();
        Ok(EpochReport {
            epoch: self.epoch,
            success_rate: (attempts > 0).then(|| successes as f64 / attempts as f64),
            rollout_success,
            memory_size: self.memory.len(),
            mean_loss,
            learning_rate: lr,
            teacher_invocations: self.teacher_invocations(),
            timeouts: stats.timeouts,
            dead_ends: stats.dead_ends,
            wall_time: self.elapsed(),
        })
    }

    fn train_phase(&mut self, lr: f64) -> Result<Option<f64>, TrainError> {
        let sizes: Vec<usize> = self.memory.problems.iter().map(|p| p.entries.len()).collect();
        let shares = batch_shares(&sizes, self.cfg.batch_size);
        if shares.iter().all(|&s| s == 0) {
            return Ok(None);
        }
        let adam_cfg = AdamConfig {
            learning_rate: lr,
            ..AdamConfig::default()
        };
        let mut total = 0.0;
        let mut iters = 0;
        for _ in 0..self.cfg.train_iters {
            if self.out_of_time() {
                break;
            }
            let mut picks = Vec::with_capacity(self.cfg.batch_size);
            for (p, &k) in shares.iter().enumerate() {
                for _ in 0..k {
                    picks.push((p, self.rng.gen_range(0..sizes[p])));
                }
            }
            let items: Vec<BatchItem> = picks
                .iter()
                .map(|&(p, i)| {
                    let e = &self.memory.problems[p].entries[i];
                    BatchItem {
                        topo: &self.problems[p].net.topo,
                        features: &e.features,
                        labels: &e.labels,
                    }
                })
                .collect();
            let dropout = (self.cfg.dropout > 0.0).then(|| (self.cfg.dropout, self.rng.gen()));
            let (loss, grads) = batch_loss(&self.store, &items, self.cfg.l2, self.cfg.l1, dropout)?;
            drop(items);
            self.adam.step(&adam_cfg, &mut self.store.params, &grads);
            total += loss;
            iters += 1;
        }
        Ok((iters > 0).then(|| total / iters as f64))
    }

    /// Runs epochs until early stopping, the wall budget or the epoch cap; `observer`
    /// sees every report with the store as of the end of that epoch.
    pub fn run(mut self, mut observer: impl FnMut(&EpochReport, &ParameterStore)) -> Result<TrainOutcome, TrainError> {
        let mut log = Vec::new();
        let mut streak = 0;
        let stop = loop {
            if self.out_of_time() {
                break StopReason::WallTime;
            }
            if self.cfg.max_epochs.is_some_and(|m| self.epoch >= m) {
                break StopReason::MaxEpochs;
            }
            let report = self.train_epoch()?;
            log::info!(
                "epoch {} success {:?} memory {} loss {:?}",
                report.epoch,
                report.success_rate,
                report.memory_size,
                report.mean_loss
            );
            observer(&report, &self.store);
            if report.success_rate.is_some_and(|r| r >= self.cfg.p_solved) {
                streak += 1;
            } else {
                streak = 0;
            }
            log.push(report);
            if streak >= self.cfg.stop_epochs {
                break StopReason::EarlyStop;
            }
        };
        let teacher_invocations = self.teacher_invocations();
        Ok(TrainOutcome {
            store: self.store,
            log,
            stop,
            memory: self.memory,
            teacher_invocations,
        })
    }
}

fn merge_stats(into: &mut LabelStats, results: Vec<Result<LabelStats, TrainError>>) -> Result<(), TrainError> {
    for r in results {
        let st = r?;
        into.timeouts += st.timeouts;
        into.dead_ends += st.dead_ends;
        into.labelled += st.labelled;
    }
    Ok(())
}

/// Trains a fresh network on `problems` until early stopping or the wall budget.
pub fn train(problems: &[Arc<GroundProblem>], cfg: TrainConfig) -> Result<TrainOutcome, TrainError> {
    Trainer::new(problems, cfg)?.run(|_, _| {})
}

/// L1-regularised training, then every weight below the prune threshold set to zero.
pub fn sparse_train(problems: &[Arc<GroundProblem>], cfg: SparseTrainConfig) -> Result<TrainOutcome, TrainError> {
    if !(cfg.train.l1 > 0.0) {
        return Err(TrainError::InvalidConfig("sparse training needs a positive l1 weight".into()));
    }
    let mut out = train(problems, cfg.train)?;
    out.store.prune(cfg.prune_threshold);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domains;

    fn small_cfg() -> TrainConfig {
        TrainConfig {
            d_h: 4,
            train_iters: 20,
            batch_size: 8,
            trajectories_per_epoch: 4,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn explore_budget_rounds_up() {
        assert_eq!(explore_budget(70, 3), 24);
        assert_eq!(explore_budget(70, 70), 1);
        assert_eq!(explore_budget(70, 100), 1);
    }

    #[test]
    fn shares_split_evenly_with_low_index_remainder() {
        assert_eq!(batch_shares(&[5, 9], 64), [32, 32]);
        assert_eq!(batch_shares(&[5, 9, 1], 64), [22, 21, 21]);
        assert_eq!(batch_shares(&[5, 0, 1], 7), [4, 0, 3]);
        assert_eq!(batch_shares(&[0, 0], 7), [0, 0]);
    }

    #[test]
    fn schedule_lookup() {
        let cfg = SparseTrainConfig::default().train;
        assert_eq!(cfg.learning_rate_at(1), 1e-2);
        assert_eq!(cfg.learning_rate_at(30), 1e-3);
        assert_eq!(cfg.learning_rate_at(45), 1e-4);
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        for bad in [
            TrainConfig { p_solved: 0.0, ..TrainConfig::default() },
            TrainConfig { dropout: 1.0, ..TrainConfig::default() },
            TrainConfig { batch_size: 0, ..TrainConfig::default() },
            TrainConfig { learning_rate: -1.0, ..TrainConfig::default() },
        ] {
            assert!(matches!(bad.validate(), Err(TrainError::InvalidConfig(_))));
        }
        let json = serde_json::to_string(&TrainConfig::default()).unwrap();
        assert_eq!(serde_json::from_str::<TrainConfig>(&json).unwrap(), TrainConfig::default());
        assert!(serde_json::from_str::<TrainConfig>("{\"bogus\": 1}").is_err());
    }

    #[test]
    fn zero_budget_returns_initial_store() {
        let gp = Arc::new(domains::triangle_tireworld(1).ground().unwrap());
        let cfg = TrainConfig {
            max_wall_time: 0.0,
            ..small_cfg()
        };
        let init = Trainer::new(&[gp.clone()], cfg.clone()).unwrap().store;
        let out = train(&[gp], cfg).unwrap();
        assert!(out.log.is_empty());
        assert_eq!(out.stop, StopReason::WallTime);
        assert_eq!(out.store, init);
    }

    #[test]
    fn goal_start_stops_after_streak() {
        let inst = domains::two_chain(1, true);
        let d = inst.domain.clone();
        let p = crate::ppddl::parse_problem(
            "(define (problem g) (:domain unreliable-robot) (:objects m l1 - location)
              (:init (at shakey m) (path m l1)) (:goal (at shakey m)))",
        )
        .unwrap();
        let gp = Arc::new(crate::ppddl::ground(&d, &p).unwrap());
        let out = train(&[gp], TrainConfig { stop_epochs: 3, ..small_cfg() }).unwrap();
        assert_eq!(out.stop, StopReason::EarlyStop);
        // The teacher-only first epoch has no rollouts to score.
        assert_eq!(out.log.len(), 4);
        assert!(out.memory.is_empty());
        assert!(out.log.iter().all(|r| r.mean_loss.is_none()));
    }

    #[test]
    fn first_epoch_stores_teacher_traces() {
        let problems: Vec<Arc<GroundProblem>> = (1..=2).map(|k| Arc::new(domains::two_chain(k, true).ground().unwrap())).collect();
        let mut t = Trainer::new(&problems, small_cfg()).unwrap();
        let r = t.train_epoch().unwrap();
        assert!(r.rollout_success.iter().all(|v| v.is_empty()));
        assert_eq!(r.success_rate, None);
        // A robot on a chain of length k visits k non-goal states on the teacher trace
        // unless a drive fails, which repeats a state with higher counts.
        for (k, mem) in t.memory.problems.iter().enumerate() {
            assert!(mem.entries.len() >= k + 1);
            for e in &mem.entries {
                assert!(e.labels.iter().any(|&y| y));
                assert!(e.q.iter().all(|&(_, q)| q >= 0.0));
                for (a, &y) in e.labels.iter().enumerate() {
                    assert!(!y || e.features.enabled[a]);
                }
            }
        }
        assert!(t.teacher_invocations() <= t.memory.len());
    }

    #[test]
    fn later_epochs_roll_out_policy() {
        let problems: Vec<Arc<GroundProblem>> = (1..=3).map(|n| Arc::new(domains::triangle_tireworld(n.min(2)).ground().unwrap())).collect();
        let mut t = Trainer::new(&problems, small_cfg()).unwrap();
        t.train_epoch().unwrap();
        let r = t.train_epoch().unwrap();
        // Budget 4 over 3 problems: one full round then one more rollout.
        let counts: Vec<usize> = r.rollout_success.iter().map(Vec::len).collect();
        assert_eq!(counts, [2, 1, 1]);
        assert!(r.mean_loss.unwrap().is_finite());
    }

    #[test]
    fn seeded_training_is_reproducible() {
        let problems = vec![Arc::new(domains::triangle_tireworld(1).ground().unwrap())];
        let cfg = TrainConfig {
            max_epochs: Some(3),
            ..small_cfg()
        };
        let a = train(&problems, cfg.clone()).unwrap();
        let b = train(&problems, cfg).unwrap();
        assert_eq!(a.store, b.store);
        assert_eq!(a.stop, StopReason::MaxEpochs);
    }

    #[test]
    fn huge_l1_collapses_after_pruning() {
        let problems = vec![Arc::new(domains::triangle_tireworld(1).ground().unwrap())];
        let cfg = SparseTrainConfig {
            train: TrainConfig {
                l1: 10.0,
                l2: 0.0,
                dropout: 0.0,
                learning_rate: 0.05,
                lr_schedule: vec![LrStep { epoch: 2, learning_rate: 1e-3 }, LrStep { epoch: 3, learning_rate: 1e-4 }],
                max_epochs: Some(3),
                train_iters: 200,
                ..small_cfg()
            },
            prune_threshold: 1e-2,
        };
        let out = sparse_train(&problems, cfg).unwrap();
        assert_eq!(out.store.params.count_nonzero(), 0);
    }

    #[test]
    fn report_json_line_round_trips() {
        let r = EpochReport {
            epoch: 2,
            rollout_success: vec![vec![true, false]],
            success_rate: Some(0.5),
            memory_size: 7,
            mean_loss: Some(0.25),
            learning_rate: 1e-3,
            teacher_invocations: 5,
            timeouts: 0,
            dead_ends: 1,
            wall_time: 0.5,
        };
        let line = r.to_json_line();
        assert!(!line.contains('\n'));
        assert_eq!(serde_json::from_str::<EpochReport>(&line).unwrap(), r);
    }
}
