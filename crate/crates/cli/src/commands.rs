use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context};
use asnets_core::asnet::{load_checkpoint, save_checkpoint, Hyper, ParameterStore, Params, ProblemNet};
use asnets_core::domains::{DomainId, GeneratorSpec, Instance};
use asnets_core::eval::{
    evaluate, export_activations, export_lifted_equations, receptive_field_experiment, rollout_rng, verify_cosanostra_inequality, verify_ttw_spare_policy,
    EvalError, PUBLISHED_REDUCED_PREV,
};
use asnets_core::heuristics::{h_add, h_max, lmcut, HeuristicKind, RelaxedTask};
use asnets_core::ppddl::GroundProblem;
use asnets_core::relatedness::{schema_signature, AsnetTopology, PoolingStyle};
use asnets_core::ssp::{all_outcomes_determinise, State};
use asnets_core::teachers::{SearchKind, Teacher, TeacherConfig};
use asnets_core::training::{run_policy, ExecMode, TrainConfig, Trainer};
use clap::Args;
use serde_json::json;

use crate::config::RunConfig;
use crate::Command;

/// A check ran to completion and did not hold; maps to exit code 1.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct VerificationFailed(pub String);

pub enum CliError {
    Verification(String),
    Input(anyhow::Error),
}

pub fn run(cmd: Command, cfg: &RunConfig) -> Result<(), CliError> {
    let r = match cmd {
        Command::Ground(a) => ground(a, cfg),
        Command::Teach(a) => teach(a, cfg),
        Command::InspectHeuristic(a) => inspect_heuristic(a),
        Command::Train(a) => train(a, cfg),
        Command::Sparsify(a) => sparsify(a, cfg),
        Command::Eval(a) => eval(a, cfg),
        Command::Rollout(a) => rollout(a, cfg),
        Command::ReceptiveField(a) => receptive(a, cfg),
        Command::ExportEquations(a) => equations(a, cfg),
        Command::ExportActivations(a) => activations(a, cfg),
        Command::VerifySparse(a) => verify(a, cfg),
        Command::GenDomain(a) => gen_domain(a),
    };
    r.map_err(|e| match e.downcast::<VerificationFailed>() {
        Ok(v) => CliError::Verification(v.0),
        Err(e) => CliError::Input(e),
    })
}

fn parse_mode(s: &str) -> Result<ExecMode, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string())).map_err(|_| format!("unknown mode {s}; expected argmax, argmax-random-tie or sample"))
}

fn parse_search(s: &str) -> Result<SearchKind, String> {
    SearchKind::parse(s).ok_or_else(|| format!("unknown search {s}; expected auto, astar, gbfs or lrtdp"))
}

fn parse_heuristic(s: &str) -> Result<HeuristicKind, String> {
    HeuristicKind::parse(s).ok_or_else(|| format!("unknown heuristic {s}; expected zero, hmax, hadd or lmcut"))
}

fn parse_domain_id(s: &str) -> Result<DomainId, String> {
    DomainId::parse(s).ok_or_else(|| format!("unknown domain {s}; expected ttw, cosanostra, two-chain, blocksworld or prob-blocksworld"))
}

fn read(path: &Path) -> anyhow::Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn load_problems(domain: &Path, problems: &[PathBuf]) -> anyhow::Result<Vec<Arc<GroundProblem>>> {
    let dtext = read(domain)?;
    problems
        .iter()
        .map(|p| {
            let inst = Instance::from_text(dtext.clone(), read(p)?).with_context(|| format!("parsing {}", p.display()))?;
            Ok(Arc::new(inst.ground().with_context(|| format!("grounding {}", p.display()))?))
        })
        .collect()
}

fn load_one(domain: &Path, problem: &Path) -> anyhow::Result<Arc<GroundProblem>> {
    Ok(load_problems(domain, &[problem.to_path_buf()])?.remove(0))
}

fn load_weights(path: &Path) -> anyhow::Result<ParameterStore> {
    load_checkpoint(path).with_context(|| format!("loading {}", path.display()))
}

/// Writes to stdout; a closed pipe (`asnets ... | head`) is not an error.
fn emit(text: &str) -> anyhow::Result<()> {
    let mut out = std::io::stdout().lock();
    match out.write_all(text.as_bytes()).and_then(|_| out.flush()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

fn print_json(v: &impl serde::Serialize) -> anyhow::Result<()> {
    emit(&(serde_json::to_string_pretty(v)? + "\n"))
}

#[derive(Debug, Args)]
pub struct GroundArgs {
    domain: PathBuf,
    problem: PathBuf,
    /// Also build the network topology (layers and width from the config).
    #[arg(long)]
    emit_topology: bool,
}

fn ground(a: GroundArgs, cfg: &RunConfig) -> anyhow::Result<()> {
    let gp = load_one(&a.domain, &a.problem)?;
    let mut out = json!({
        "domain": gp.domain_name,
        "problem": gp.name,
        "propositions": gp.num_props(),
        "actions": gp.num_actions(),
        "goal_propositions": gp.goal.len(),
        "deterministic": gp.is_deterministic(),
        "stats": gp.stats,
    });
    if a.emit_topology {
        let sig = schema_signature(&gp.domain);
        let t = &cfg.train;
        let topo = AsnetTopology::build(&gp, &sig, t.layers, t.d_h, t.flags)?;
        let hyper = Hyper {
            layers: t.layers,
            d_h: t.d_h,
            flags: t.flags,
        };
        out["topology"] = json!({
            "layers": topo.layers,
            "d_h": topo.d_h,
            "schemas": sig.schemas.len(),
            "predicates": sig.predicates.len(),
            "action_modules": topo.num_actions * (topo.layers + 1),
            "proposition_modules": topo.num_props * topo.layers,
            "relatedness_edges": topo.slots.iter().map(Vec::len).sum::<usize>(),
            "parameters": Params::zeros(&sig, &hyper).num_params(),
        });
    }
    print_json(&out)
}

#[derive(Debug, Args)]
pub struct StateArgs {
    domain: PathBuf,
    problem: PathBuf,
    /// True proposition, e.g. `vehicle-at(l-1-1)`; repeat for each. Defaults to the initial state.
    #[arg(long = "fact")]
    facts: Vec<String>,
}

impl StateArgs {
    fn load(&self) -> anyhow::Result<(Arc<GroundProblem>, State)> {
        let gp = load_one(&self.domain, &self.problem)?;
        let s = if self.facts.is_empty() { gp.s0.clone() } else { gp.state_from_names(&self.facts)? };
        Ok((gp, s))
    }
}

#[derive(Debug, Args)]
pub struct TeachArgs {
    #[command(flatten)]
    state: StateArgs,
    #[arg(long, value_parser = parse_search)]
    search: Option<SearchKind>,
    #[arg(long, value_parser = parse_heuristic)]
    heuristic: Option<HeuristicKind>,
}

fn teach(a: TeachArgs, cfg: &RunConfig) -> anyhow::Result<()> {
    let (gp, s) = a.state.load()?;
    let tcfg = TeacherConfig {
        search: a.search.unwrap_or(cfg.train.teacher.search),
        heuristic: a.heuristic.unwrap_or(cfg.train.teacher.heuristic),
        ..cfg.train.teacher.clone()
    };
    let teacher = Teacher::new(gp.clone(), tcfg)?;
    let v = teacher.q_values(&s)?;
    let actions: Vec<_> = v
        .actions
        .iter()
        .zip(&v.q)
        .zip(&v.labels)
        .map(|((&a, q), l)| json!({"action": gp.actions[a].name, "q": q, "optimal": l}))
        .collect();
    print_json(&json!({"state": gp.state_names(&s), "status": v.status, "actions": actions}))
}

fn inspect_heuristic(a: StateArgs) -> anyhow::Result<()> {
    let (gp, s) = a.load()?;
    let task = RelaxedTask::new(&all_outcomes_determinise(&gp));
    let (lm, set) = lmcut(&task, &s);
    let landmarks: Vec<Vec<&str>> = set.landmarks.iter().map(|l| l.iter().map(|&a| gp.actions[a].name.as_str()).collect()).collect();
    print_json(&json!({
        "state": gp.state_names(&s),
        "hadd": h_add(&task, &s),
        "hmax": h_max(&task, &s),
        "lmcut": lm,
        "landmarks": landmarks,
    }))
}

/// Network and teacher overrides shared by the training commands.
#[derive(Debug, Args)]
pub struct NetArgs {
    /// Proposition layers.
    #[arg(long)]
    layers: Option<usize>,
    /// Hidden channels per module.
    #[arg(long)]
    hidden: Option<usize>,
    #[arg(long, value_parser = parse_search)]
    teacher: Option<SearchKind>,
    #[arg(long, value_parser = parse_heuristic)]
    heuristic: Option<HeuristicKind>,
    #[arg(long)]
    no_landmarks: bool,
    #[arg(long)]
    no_history: bool,
    #[arg(long)]
    no_skip: bool,
    /// Pool over every action of a schema regardless of slot position.
    #[arg(long)]
    old_pooling: bool,
    #[arg(long)]
    max_epochs: Option<usize>,
}

impl NetArgs {
    fn apply(&self, t: &mut TrainConfig) {
        if let Some(l) = self.layers {
            t.layers = l;
        }
        if let Some(h) = self.hidden {
            t.d_h = h;
        }
        if let Some(s) = self.teacher {
            t.teacher.search = s;
        }
        if let Some(h) = self.heuristic {
            t.teacher.heuristic = h;
        }
        t.flags.landmarks &= !self.no_landmarks;
        t.flags.history &= !self.no_history;
        t.flags.skip &= !self.no_skip;
        if self.old_pooling {
            t.flags.pooling = PoolingStyle::OldStyle;
        }
        if self.max_epochs.is_some() {
            t.max_epochs = self.max_epochs;
        }
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    domain: PathBuf,
    #[arg(required = true)]
    problems: Vec<PathBuf>,
    /// Checkpoint to write.
    #[arg(short, long)]
    output: PathBuf,
    /// Per-epoch JSON lines.
    #[arg(long)]
    log: Option<PathBuf>,
    #[command(flatten)]
    net: NetArgs,
}

fn run_training(problems: &[Arc<GroundProblem>], tcfg: TrainConfig, log: Option<&Path>) -> anyhow::Result<asnets_core::training::TrainOutcome> {
    let mut sink = log.map(|p| File::create(p).map(BufWriter::new).with_context(|| format!("creating {}", p.display()))).transpose()?;
    let mut io_err = None;
    let out = Trainer::new(problems, tcfg)?.run(|r, _| {
        if let Some(w) = sink.as_mut() {
            if let Err(e) = r.write_json_line(w).and_then(|_| w.flush()) {
                io_err.get_or_insert(e);
            }
        }
    })?;
    if let Some(e) = io_err {
        return Err(e).context("writing training log");
    }
    Ok(out)
}

fn summary(out: &asnets_core::training::TrainOutcome) -> serde_json::Value {
    let last = out.log.last();
    json!({
        "stop": out.stop,
        "epochs": out.log.len(),
        "teacher_invocations": out.teacher_invocations,
        "final_success_rate": last.and_then(|r| r.success_rate),
        "wall_time": last.map_or(0.0, |r| r.wall_time),
        "nonzero_parameters": out.store.params.count_nonzero(),
    })
}

fn train(a: TrainArgs, cfg: &RunConfig) -> anyhow::Result<()> {
    let problems = load_problems(&a.domain, &a.problems)?;
    let mut tcfg = cfg.train.clone();
    a.net.apply(&mut tcfg);
    let out = run_training(&problems, tcfg, a.log.as_deref())?;
    save_checkpoint(&out.store, &a.output)?;
    print_json(&summary(&out))
}

#[derive(Debug, Args)]
pub struct SparsifyArgs {
    domain: Option<PathBuf>,
    problems: Vec<PathBuf>,
    /// Prune this checkpoint instead of training.
    #[arg(long)]
    weights: Option<PathBuf>,
    #[arg(short, long)]
    output: PathBuf,
    /// Weights with smaller magnitude are zeroed; defaults to the config value.
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long)]
    log: Option<PathBuf>,
    #[command(flatten)]
    net: NetArgs,
}

fn sparsify(a: SparsifyArgs, cfg: &RunConfig) -> anyhow::Result<()> {
    let tau = a.threshold.unwrap_or(cfg.sparse.prune_threshold);
    if !(tau >= 0.0) {
        bail!("threshold must be non-negative");
    }
    if let Some(w) = &a.weights {
        let mut store = load_weights(w)?;
        let zeroed = store.prune(tau);
        save_checkpoint(&store, &a.output)?;
        return print_json(&json!({"zeroed": zeroed, "nonzero_parameters": store.params.count_nonzero()}));
    }
    let Some(domain) = &a.domain else { bail!("give a domain and problems, or --weights") };
    if a.problems.is_empty() {
        bail!("no training problems");
    }
    let problems = load_problems(domain, &a.problems)?;
    let mut tcfg = cfg.sparse.train.clone();
    a.net.apply(&mut tcfg);
    if !(tcfg.l1 > 0.0) {
        bail!("sparse training needs a positive l1 weight");
    }
    let mut out = run_training(&problems, tcfg, a.log.as_deref())?;
    out.store.prune(tau);
    save_checkpoint(&out.store, &a.output)?;
    print_json(&summary(&out))
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    domain: PathBuf,
    #[arg(required = true)]
    problems: Vec<PathBuf>,
    #[arg(long)]
    weights: PathBuf,
    #[arg(long)]
    rollouts: Option<usize>,
    #[arg(long, value_parser = parse_mode)]
    mode: Option<ExecMode>,
    /// Print the report as JSON instead of a table.
    #[arg(long)]
    json: bool,
    /// Exit with status 1 when cumulative coverage falls below this.
    #[arg(long)]
    require_coverage: Option<f64>,
}

fn eval(a: EvalArgs, cfg: &RunConfig) -> anyhow::Result<()> {
    let store = load_weights(&a.weights)?;
    let problems = load_problems(&a.domain, &a.problems)?;
    let mut ecfg = cfg.eval.clone();
    if a.rollouts.is_some() {
        ecfg.rollouts = a.rollouts;
    }
    if let Some(m) = a.mode {
        ecfg.mode = m;
    }
    let report = evaluate(&store, &problems, &ecfg)?;
    if a.json {
        emit(&(report.to_json() + "\n"))?;
    } else {
        emit(&report.render_table())?;
    }
    if let Some(min) = a.require_coverage {
        let got = report.cumulative_coverage();
        if got < min {
            return Err(VerificationFailed(format!("cumulative coverage {got} below {min}")).into());
        }
    }
    Ok(())
}

#[derive(Debug, Args)]
pub struct RolloutArgs {
    domain: PathBuf,
    problem: PathBuf,
    #[arg(long)]
    weights: PathBuf,
    #[arg(long, value_parser = parse_mode)]
    mode: Option<ExecMode>,
    /// Rollout index; selects the random stream.
    #[arg(long, default_value_t = 0)]
    index: usize,
}

fn policy_rollout(store: &ParameterStore, gp: &Arc<GroundProblem>, mode: Option<ExecMode>, index: usize, cfg: &RunConfig) -> anyhow::Result<(ProblemNet, asnets_core::training::RolloutRecord)> {
    let net = ProblemNet::new(gp.clone(), store)?;
    let mut rng = rollout_rng(cfg.eval.seed, 0, index);
    let rec = run_policy(store, &net, &gp.s0, &mut rng, cfg.eval.step_limit, mode.unwrap_or(cfg.eval.mode))?;
    Ok((net, rec))
}

fn rollout(a: RolloutArgs, cfg: &RunConfig) -> anyhow::Result<()> {
    let store = load_weights(&a.weights)?;
    let gp = load_one(&a.domain, &a.problem)?;
    let (_, rec) = policy_rollout(&store, &gp, a.mode, a.index, cfg)?;
    let actions: Vec<&str> = rec.actions.iter().map(|&i| gp.actions[i].name.as_str()).collect();
    print_json(&json!({
        "problem": gp.name,
        "outcome": rec.outcome,
        "cost": rec.cost,
        "actions": actions,
        "final_state": gp.state_names(rec.states.last().expect("rollout has a state")),
    }))
}

fn parse_list(s: &str) -> Result<Vec<usize>, String> {
    if let Some((lo, hi)) = s.split_once("..=") {
        let lo: usize = lo.trim().parse().map_err(|e| format!("{e}"))?;
        let hi: usize = hi.trim().parse().map_err(|e| format!("{e}"))?;
        return Ok((lo..=hi).collect());
    }
    s.split(',').map(|x| x.trim().parse::<usize>().map_err(|e| format!("{x}: {e}"))).collect()
}

#[derive(Debug, Args)]
pub struct ReceptiveArgs {
    /// Depths as `1,2,3,4` or `1..=4`.
    #[arg(long, default_value = "1,2,3,4")]
    layers: String,
    /// Chain lengths, same syntax.
    #[arg(long, default_value = "1,2,3,4,5")]
    ks: String,
    #[arg(long)]
    rollouts: Option<usize>,
    #[arg(long)]
    json: bool,
}

fn receptive(a: ReceptiveArgs, cfg: &RunConfig) -> anyhow::Result<()> {
    let layers = parse_list(&a.layers).map_err(anyhow::Error::msg)?;
    let ks = parse_list(&a.ks).map_err(anyhow::Error::msg)?;
    if layers.is_empty() || ks.is_empty() || layers.contains(&0) || ks.contains(&0) {
        bail!("layers and chain lengths must be at least 1");
    }
    let mut rcfg = cfg.receptive_field.clone();
    if let Some(r) = a.rollouts {
        rcfg.rollouts = r;
    }
    let table = receptive_field_experiment(&layers, &ks, &rcfg)?;
    if a.json {
        print_json(&table)
    } else {
        emit(&table.render())
    }
}

#[derive(Debug, Args)]
pub struct EquationArgs {
    #[arg(long)]
    weights: PathBuf,
    /// Omit weights with smaller magnitude; defaults to the sparse prune threshold.
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long)]
    json: bool,
}

fn equations(a: EquationArgs, cfg: &RunConfig) -> anyhow::Result<()> {
    let store = load_weights(&a.weights)?;
    let dump = export_lifted_equations(&store, a.threshold.unwrap_or(cfg.sparse.prune_threshold));
    if a.json {
        emit(&(dump.to_json() + "\n"))
    } else {
        emit(&dump.render_text())
    }
}

#[derive(Debug, Args)]
pub struct ActivationArgs {
    domain: PathBuf,
    problem: PathBuf,
    #[arg(long)]
    weights: PathBuf,
    #[arg(long, value_parser = parse_mode)]
    mode: Option<ExecMode>,
    #[arg(long, default_value_t = 0)]
    index: usize,
    /// Write one row per module channel and step.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Write the nested dump; printed to stdout when neither output is given.
    #[arg(long)]
    json: Option<PathBuf>,
}

fn activations(a: ActivationArgs, cfg: &RunConfig) -> anyhow::Result<()> {
    let store = load_weights(&a.weights)?;
    let gp = load_one(&a.domain, &a.problem)?;
    let (net, rec) = policy_rollout(&store, &gp, a.mode, a.index, cfg)?;
    let dump = export_activations(&store, &net, &rec)?;
    if let Some(p) = &a.csv {
        let f = File::create(p).with_context(|| format!("creating {}", p.display()))?;
        dump.write_csv(BufWriter::new(f))?;
    }
    if let Some(p) = &a.json {
        std::fs::write(p, dump.to_json()).with_context(|| format!("writing {}", p.display()))?;
    }
    if a.csv.is_none() && a.json.is_none() {
        emit(&(dump.to_json() + "\n"))?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum SparseDomain {
    Cosanostra,
    Ttw,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long, value_enum)]
    domain: SparseDomain,
    #[arg(long)]
    weights: PathBuf,
    /// Booths for CosaNostra; largest size for Triangle Tireworld.
    #[arg(long = "K")]
    k: usize,
    /// Triangle Tireworld rollouts per size.
    #[arg(long, default_value_t = 30)]
    rollouts: usize,
}

fn verify(a: VerifyArgs, cfg: &RunConfig) -> anyhow::Result<()> {
    let store = load_weights(&a.weights)?;
    match a.domain {
        SparseDomain::Cosanostra => match verify_cosanostra_inequality(&store, a.k) {
            Ok(proof) => {
                let mut text = proof.render();
                for c in &proof.checks {
                    text += &format!("b{}: reduced previous-booth term {} (published {PUBLISHED_REDUCED_PREV})\n", c.k, c.reduced_prev);
                }
                emit(&text)
            }
            Err(EvalError::AssertionFailure { k, detail }) => Err(VerificationFailed(format!("booth b{k}: {detail}")).into()),
            Err(e) => Err(e.into()),
        },
        SparseDomain::Ttw => {
            if a.k == 0 {
                bail!("--K must be at least 1");
            }
            let checks = verify_ttw_spare_policy(&store, a.k, a.rollouts, cfg.eval.seed)?;
            let mut failed = Vec::new();
            let mut text = String::new();
            for c in &checks {
                text += &format!("size {}: {}/{} reached the goal, {} spare violations\n", c.size, c.successes, c.attempts, c.violations.len());
                if !c.passed() {
                    failed.push(c.size);
                }
            }
            emit(&text)?;
            if failed.is_empty() {
                Ok(())
            } else {
                Err(VerificationFailed(format!("sizes {failed:?} failed")).into())
            }
        }
    }
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(value_parser = parse_domain_id)]
    domain: DomainId,
    #[arg(long)]
    size: usize,
    /// Blocksworld only.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Two-chain only: put the goal on the right chain.
    #[arg(long)]
    goal_right: bool,
    /// Problem file to write.
    #[arg(short, long)]
    output: PathBuf,
    /// Domain file to write; defaults to `<domain>.pddl` next to the problem.
    #[arg(long)]
    domain_out: Option<PathBuf>,
}

fn gen_domain(a: GenArgs) -> anyhow::Result<()> {
    if a.size == 0 {
        bail!("--size must be at least 1");
    }
    let spec = GeneratorSpec {
        seed: a.seed,
        goal_left: !a.goal_right,
        ..GeneratorSpec::new(a.domain, a.size)
    };
    let inst = spec.generate();
    let domain_out = a.domain_out.unwrap_or_else(|| a.output.with_file_name(format!("{}.pddl", a.domain.stem())));
    std::fs::write(&domain_out, &inst.domain_text).with_context(|| format!("writing {}", domain_out.display()))?;
    std::fs::write(&a.output, &inst.problem_text).with_context(|| format!("writing {}", a.output.display()))?;
    log::info!("wrote {} and {}", domain_out.display(), a.output.display());
    Ok(())
}
