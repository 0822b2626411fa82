use std::fmt::{self, Write as _};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use cbsg::game::{individual_optimization, solve_cbbi, Action, CbseResult, GameConfig};
use cbsg::lincontrol::{MaskMode, StateSpaceModel, ValidationOptions};
use cbsg::lossmap::{
    build_loss_table, importance_ranking, model_hash, LossMapOptions, LossTable, SparsityPattern,
};
use cbsg::modelio::fixtures::write_fixtures;
use cbsg::modelio::{load_loss_table, load_model, load_model_set, save_loss_table};
use cbsg::robust::{controller_mismatch, MismatchStats, ModelSet, RobustAnalysis};

use crate::record::{emit_json, RunRecord};
use crate::{Cli, Command, GameArgs, GameKind};

/// Some sweep points failed; the others were written.
#[derive(Debug)]
pub struct PartialFailure {
    pub failed: usize,
    pub total: usize,
}

impl fmt::Display for PartialFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} of {} grid points failed", self.failed, self.total)
    }
}

impl std::error::Error for PartialFailure {}

#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

struct Ctx {
    validation: ValidationOptions,
    loss_opts: LossMapOptions,
    cache: Option<PathBuf>,
}

fn default_cache_dir() -> Option<PathBuf> {
    let base = std::env::var_os("XDG_CACHE_HOME")
        .map(PathBuf::from)
        .or_else(|| std::env::var_os("HOME").map(|h| PathBuf::from(h).join(".cache")))?;
    Some(base.join("cbsg"))
}

impl Ctx {
    fn new(cli: &Cli) -> Self {
        let validation = if cli.allow_marginal { ValidationOptions::allow_marginal() } else { ValidationOptions::default() };
        let cache = if cli.no_cache { None } else { cli.cache_dir.clone().or_else(default_cache_dir) };
        Self {
            validation,
            loss_opts: LossMapOptions { node_cap: cli.node_cap, ..Default::default() },
            cache,
        }
    }

    fn snapshot(&self) -> Value {
        json!({
            "hurwitz_margin": self.validation.hurwitz_margin,
            "node_cap": self.loss_opts.node_cap,
            "synth": self.loss_opts.synth,
        })
    }

    fn model(&self, path: &Path, rec: &mut RunRecord) -> Result<StateSpaceModel> {
        if is_set_manifest(path)? {
            return Err(usage(format!("{} is a model set; this command needs a single model", path.display())));
        }
        rec.add_file(path)?;
        Ok(load_model(path, self.validation)?)
    }

    fn set(&self, path: &Path, rec: &mut RunRecord, mode: MaskMode) -> Result<ModelSet> {
        if !is_set_manifest(path)? {
            return Err(usage(format!("{} is a single model; this command needs a model set", path.display())));
        }
        rec.add_file(path)?;
        let set = load_model_set(path, self.validation)?;
        for (i, m) in set.models().iter().enumerate() {
            rec.add_digest(format!("model[{i}]"), model_hash(m, mode, &self.loss_opts.synth));
        }
        Ok(set)
    }

    /// Loss table through the on-disk cache, keyed by the model content hash.
    fn table(&self, model: &StateSpaceModel, mode: MaskMode) -> Result<LossTable> {
        let hash = model_hash(model, mode, &self.loss_opts.synth);
        let Some(dir) = &self.cache else {
            return Ok(build_loss_table(model, mode, &self.loss_opts)?);
        };
        let path = dir.join(format!("{hash}.json"));
        if path.exists() {
            match load_loss_table(&path, Some(&hash)) {
                Ok(t) => {
                    log::info!("loss table from cache {}", path.display());
                    return Ok(t);
                }
                Err(e) => log::warn!("ignoring cache entry: {e}"),
            }
        }
        let table = build_loss_table(model, mode, &self.loss_opts)?;
        if let Err(e) = save_loss_table(&table, &path) {
            log::warn!("could not write cache: {e}");
        }
        Ok(table)
    }

    fn analysis(&self, set: ModelSet, mode: MaskMode) -> Result<RobustAnalysis> {
        let tables = set.models().iter().map(|m| self.table(m, mode)).collect::<Result<Vec<_>>>()?;
        Ok(RobustAnalysis::from_tables(set, tables)?)
    }
}

fn is_set_manifest(path: &Path) -> Result<bool> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| cbsg::modelio::ModelIoError::Parse { path: path.display().to_string(), detail: e.to_string() })?;
    let value: Value = serde_json::from_str(&text)
        .map_err(|e| cbsg::modelio::ModelIoError::Parse { path: path.display().to_string(), detail: e.to_string() })?;
    Ok(value.get("models").is_some())
}

#[derive(Deserialize)]
struct CostFile {
    gamma_a: Vec<f64>,
    gamma_d: Vec<f64>,
}

fn game_config(args: &GameArgs, n: usize, ga: Option<f64>, gd: Option<f64>, rec: &mut RunRecord) -> Result<GameConfig> {
    let mut cfg = GameConfig::uniform(n, args.la, args.ld, 1.0, 1.0);
    cfg.payoff_tie_tol = args.payoff_tol;
    if let Some(path) = &args.costs {
        rec.add_file(path)?;
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let costs: CostFile = serde_json::from_str(&text)
            .map_err(|e| cbsg::modelio::ModelIoError::Parse { path: path.display().to_string(), detail: e.to_string() })?;
        cfg.gamma_a = costs.gamma_a;
        cfg.gamma_d = costs.gamma_d;
    } else if ga.is_none() || gd.is_none() {
        return Err(usage("give --ga and --gd, or --costs"));
    }
    if let Some(g) = ga {
        cfg.gamma_a = vec![g; n];
    }
    if let Some(g) = gd {
        cfg.gamma_d = vec![g; n];
    }
    cfg.validate()?;
    Ok(cfg)
}

#[derive(Serialize)]
struct Strategy {
    steps: Vec<u32>,
    levels: u32,
    fractions: Vec<f64>,
    cost: f64,
}

impl From<&Action> for Strategy {
    fn from(a: &Action) -> Self {
        Self { steps: a.steps.clone(), levels: a.levels, fractions: a.level_vector(), cost: a.cost }
    }
}

#[derive(Serialize)]
struct Equilibrium {
    a_star: Strategy,
    d_star: Strategy,
    attacker_payoff: f64,
    defender_payoff: f64,
    /// Attacker payoff as a percentage of the evaluation model's optimal cost.
    fractional_payoff_pct: f64,
    num_attacker_ties: usize,
    num_defender_ties: usize,
    used_nonconverged_losses: bool,
    attacker_action_count: usize,
    defender_action_count: usize,
}

fn equilibrium(r: &CbseResult, table: &LossTable) -> Equilibrium {
    Equilibrium {
        a_star: (&r.a_star).into(),
        d_star: (&r.d_star).into(),
        attacker_payoff: r.attacker_payoff,
        defender_payoff: r.defender_payoff,
        fractional_payoff_pct: table.percent_of_optimum(r.attacker_payoff),
        num_attacker_ties: r.num_attacker_ties,
        num_defender_ties: r.num_defender_ties,
        used_nonconverged_losses: r.used_nonconverged_losses,
        attacker_action_count: r.attacker_action_count,
        defender_action_count: r.defender_action_count,
    }
}

pub fn run(cli: &Cli) -> Result<()> {
    let ctx = Ctx::new(cli);
    match &cli.command {
        Command::Validate { path } => validate(&ctx, path),
        Command::Losses { model, mode, out } => losses(&ctx, model, *mode, out.as_deref()),
        Command::Solve { input, game, kind, out } => solve(&ctx, input, game, *kind, out.as_deref()),
        Command::Sweep { model, game, ga_grid, gd_grid, la_grid, ld_grid, sweep_levels, out } => {
            let (la, ld) = if sweep_levels.is_empty() {
                (la_grid.clone(), ld_grid.clone())
            } else {
                (sweep_levels.clone(), sweep_levels.clone())
            };
            sweep(&ctx, model, game, SweepGrid { ga: ga_grid.clone(), gd: gd_grid.clone(), la, ld }, out.as_deref())
        }
        Command::Robust { set, game, ga_grid, gd_grid, out, summary } => {
            robust(&ctx, set, game, ga_grid, gd_grid, out.as_deref(), summary.as_deref())
        }
        Command::IoBaseline { model, game, out } => io_baseline(&ctx, model, game, out.as_deref()),
        Command::Fixtures { out, seed } => {
            for path in write_fixtures(out, *seed)? {
                println!("{}", path.display());
            }
            Ok(())
        }
    }
}

fn validate(ctx: &Ctx, path: &Path) -> Result<()> {
    if is_set_manifest(path)? {
        let set = load_model_set(path, ctx.validation)?;
        println!("ok: {} models, {} nodes, phi = {:?}", set.len(), set.nodes(), set.phi());
    } else {
        let m = load_model(path, ctx.validation)?;
        println!("ok: {} states, {} inputs, {} nodes", m.states(), m.inputs(), m.nodes());
    }
    Ok(())
}

#[derive(Serialize)]
struct NodeLoss {
    node: usize,
    delta: f64,
    pct: f64,
}

#[derive(Serialize)]
struct PatternRow {
    index: usize,
    pattern: String,
    j: f64,
    delta: f64,
    pct: f64,
    converged: bool,
}

fn losses(ctx: &Ctx, path: &Path, mode: MaskMode, out: Option<&Path>) -> Result<()> {
    let mut rec = RunRecord::start("losses", json!({ "mode": mode, "solver": ctx.snapshot() }));
    let model = ctx.model(path, &mut rec)?;
    let table = ctx.table(&model, mode)?;
    let ranking = importance_ranking(&table);
    let single: Vec<NodeLoss> = ranking
        .iter()
        .map(|&node| {
            let delta = table.single_node_delta(node - 1);
            NodeLoss { node, delta, pct: table.percent_of_optimum(delta) }
        })
        .collect();
    let entries: Vec<PatternRow> = (0..table.len())
        .map(|i| PatternRow {
            index: i,
            pattern: SparsityPattern::from_index(i, table.n).to_string(),
            j: table.j_by_pattern[i],
            delta: table.delta_by_pattern[i],
            pct: table.percent_of_optimum(table.delta_by_pattern[i]),
            converged: table.convergence_flags[i],
        })
        .collect();
    let nonconverged = table.nonconverged_patterns();
    if !nonconverged.is_empty() {
        log::warn!("{} patterns did not converge: {nonconverged:?}", nonconverged.len());
    }

    if out.is_some() {
        println!("{:>6} {:>12} {:>10}", "node", "delta", "% of J*");
        for row in &single {
            println!("{:>6} {:>12.6e} {:>10.3}", row.node, row.delta, row.pct);
        }
        println!("{:>6} {:>12.6e} {:>10.3}", "open", table.open_loop_delta(), table.percent_of_optimum(table.open_loop_delta()));
    }
    let result = json!({
        "model_hash": table.model_id,
        "mode": table.mode,
        "n": table.n,
        "j_opt": table.j_opt,
        "j_open_loop": table.j_by_pattern[0],
        "open_loop_delta": table.open_loop_delta(),
        "open_loop_pct": table.percent_of_optimum(table.open_loop_delta()),
        "ranking": ranking,
        "single_node": single,
        "entries": entries,
        "nonconverged": nonconverged,
    });
    emit_json(&mut rec, &result, out)
}

#[derive(Serialize)]
struct PerModel {
    model: usize,
    j_opt: f64,
    ideal_payoff: f64,
    ideal_pct: f64,
    payoff: f64,
    pct: f64,
    /// `None` when the ideal payoff is zero.
    mismatch_pct: Option<f64>,
}

fn solve(ctx: &Ctx, input: &Path, args: &GameArgs, kind: GameKind, out: Option<&Path>) -> Result<()> {
    let mut rec = RunRecord::start("solve", Value::Null);
    let result = match kind {
        GameKind::Fixed => {
            let model = ctx.model(input, &mut rec)?;
            let cfg = game_config(args, model.nodes(), args.ga, args.gd, &mut rec)?;
            rec.config = json!({ "game": "fixed", "mode": args.mode, "game_config": cfg, "solver": ctx.snapshot() });
            let table = ctx.table(&model, args.mode)?;
            let r = solve_cbbi(&cfg, &table)?;
            json!({
                "game": "fixed",
                "j_opt": table.j_opt,
                "open_loop_delta": table.open_loop_delta(),
                "equilibrium": equilibrium(&r, &table),
            })
        }
        GameKind::Average | GameKind::NominalEval => {
            let set = ctx.set(input, &mut rec, args.mode)?;
            let cfg = game_config(args, set.nodes(), args.ga, args.gd, &mut rec)?;
            let label = if kind == GameKind::Average { "average" } else { "nominal-eval" };
            rec.config = json!({ "game": label, "mode": args.mode, "game_config": cfg, "solver": ctx.snapshot() });
            let an = ctx.analysis(set, args.mode)?;
            let (designed, design_table) = if kind == GameKind::Average {
                (an.solve_average_game(&cfg)?, an.average_table().clone())
            } else {
                let nominal = an.set().nominal_index();
                (an.solve_nominal_game(&cfg)?, an.tables()[nominal].clone())
            };
            let per_model = (0..an.set().len())
                .map(|i| {
                    let t = &an.tables()[i];
                    let ideal = an.evaluate_on(&an.solve_model(&cfg, i)?, i)?;
                    let payoff = an.evaluate_on(&designed, i)?;
                    let mismatch_pct = (ideal.abs() > cbsg::game::PAYOFF_ABS_FLOOR)
                        .then(|| ((payoff - ideal) / ideal).abs() * 100.0);
                    Ok(PerModel {
                        model: i,
                        j_opt: t.j_opt,
                        ideal_payoff: ideal,
                        ideal_pct: t.percent_of_optimum(ideal),
                        payoff,
                        pct: t.percent_of_optimum(payoff),
                        mismatch_pct,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            json!({
                "game": label,
                "phi": an.set().phi(),
                "nominal_index": an.set().nominal_index(),
                "j_opt": design_table.j_opt,
                "equilibrium": equilibrium(&designed, &design_table),
                "per_model": per_model,
            })
        }
    };
    emit_json(&mut rec, &result, out)
}

struct SweepGrid {
    ga: Vec<f64>,
    gd: Vec<f64>,
    la: Vec<u32>,
    ld: Vec<u32>,
}

fn steps_field(a: &Action) -> String {
    a.steps.iter().map(u32::to_string).collect::<Vec<_>>().join(" ")
}

const SWEEP_COLUMNS: &str = "gamma_a,gamma_d,levels_a,levels_d,attacker_payoff,fractional_payoff_pct,\
a_star,d_star,attacker_cost,defender_cost,attacker_ties,defender_ties,status";

fn write_text(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn sweep(ctx: &Ctx, path: &Path, args: &GameArgs, mut grid: SweepGrid, out: Option<&Path>) -> Result<()> {
    let mut rec = RunRecord::start("sweep", Value::Null);
    let model = ctx.model(path, &mut rec)?;
    let n = model.nodes();
    if grid.ga.is_empty() {
        grid.ga = vec![args.ga.ok_or_else(|| usage("give --ga or --ga-grid"))?];
    }
    if grid.gd.is_empty() {
        grid.gd = vec![args.gd.ok_or_else(|| usage("give --gd or --gd-grid"))?];
    }
    if grid.la.is_empty() {
        grid.la = vec![args.la];
    }
    if grid.ld.is_empty() {
        grid.ld = vec![args.ld];
    }
    rec.config = json!({
        "mode": args.mode,
        "ga_grid": grid.ga, "gd_grid": grid.gd, "la_grid": grid.la, "ld_grid": grid.ld,
        "payoff_tie_tol": args.payoff_tol,
        "solver": ctx.snapshot(),
    });
    let table = ctx.table(&model, args.mode)?;

    let mut body = String::new();
    let (mut failed, mut total) = (0, 0);
    for &ga in &grid.ga {
        for &gd in &grid.gd {
            for &la in &grid.la {
                for &ld in &grid.ld {
                    total += 1;
                    let mut cfg = GameConfig::uniform(n, la, ld, ga, gd);
                    cfg.payoff_tie_tol = args.payoff_tol;
                    match solve_cbbi(&cfg, &table) {
                        Ok(r) => writeln!(
                            body,
                            "{ga},{gd},{la},{ld},{},{},{},{},{},{},{},{},ok",
                            r.attacker_payoff,
                            table.percent_of_optimum(r.attacker_payoff),
                            steps_field(&r.a_star),
                            steps_field(&r.d_star),
                            r.attacker_cost,
                            r.defender_cost,
                            r.num_attacker_ties,
                            r.num_defender_ties
                        )?,
                        Err(e) => {
                            failed += 1;
                            log::error!("point ({ga}, {gd}, {la}, {ld}): {e}");
                            writeln!(body, "{ga},{gd},{la},{ld},,,,,,,,,error: {}", e.to_string().replace(',', ";"))?;
                        }
                    }
                }
            }
        }
    }
    let text = format!("{}\n{SWEEP_COLUMNS}\n{body}", rec.csv_comment()?);
    write_text(out, &text)?;
    if failed > 0 {
        return Err(PartialFailure { failed, total }.into());
    }
    Ok(())
}

fn opt_field(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

const ROBUST_COLUMNS: &str = "model,gamma_a,gamma_d,j_opt,ideal_payoff,ideal_pct,nominal_payoff,nominal_pct,\
average_payoff,average_pct,mu_nominal,mu_average,degenerate";

#[derive(Serialize)]
struct RobustSummary<'a> {
    /// How the mismatch distribution weighs its samples.
    weighting: &'static str,
    models: usize,
    cost_pairs: usize,
    nominal_game: &'a MismatchStats,
    average_game: &'a MismatchStats,
    /// H₂ degradation (%) of each model under the nominal model's optimal gain; `None` if destabilizing.
    controller_mismatch_pct: Vec<Option<f64>>,
}

fn robust(
    ctx: &Ctx,
    path: &Path,
    args: &GameArgs,
    ga_grid: &[f64],
    gd_grid: &[f64],
    out: Option<&Path>,
    summary: Option<&Path>,
) -> Result<()> {
    let mut rec = RunRecord::start("robust", Value::Null);
    let set = ctx.set(path, &mut rec, args.mode)?;
    let mut base = GameConfig::uniform(set.nodes(), args.la, args.ld, 1.0, 1.0);
    base.payoff_tie_tol = args.payoff_tol;
    rec.config = json!({
        "mode": args.mode,
        "levels_a": args.la,
        "levels_d": args.ld,
        "ga_grid": ga_grid,
        "gd_grid": gd_grid,
        "payoff_tie_tol": args.payoff_tol,
        "solver": ctx.snapshot(),
    });
    let grid: Vec<(f64, f64)> = ga_grid.iter().flat_map(|&ga| gd_grid.iter().map(move |&gd| (ga, gd))).collect();
    let an = ctx.analysis(set, args.mode)?;
    let rows = an.mismatch_rows(&base, &grid)?;

    let mut body = String::new();
    for r in &rows {
        let t = &an.tables()[r.model];
        writeln!(
            body,
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.model,
            r.gamma_a,
            r.gamma_d,
            r.j_opt,
            r.ideal_payoff,
            t.percent_of_optimum(r.ideal_payoff),
            r.nominal_payoff,
            t.percent_of_optimum(r.nominal_payoff),
            r.average_payoff,
            t.percent_of_optimum(r.average_payoff),
            opt_field(r.mu_nominal),
            opt_field(r.mu_average),
            r.mu_nominal.is_none()
        )?;
    }
    let nominal = MismatchStats::from_values(rows.iter().map(|r| r.mu_nominal));
    let average = MismatchStats::from_values(rows.iter().map(|r| r.mu_average));
    let controller = (0..an.set().len())
        .map(|i| match controller_mismatch(an.set(), i, &ctx.loss_opts.synth) {
            Ok(v) => Some(v),
            Err(e) => {
                log::warn!("controller mismatch for model {i}: {e}");
                None
            }
        })
        .collect();
    let summary_value = RobustSummary {
        weighting: "uniform over models and cost pairs",
        models: an.set().len(),
        cost_pairs: grid.len(),
        nominal_game: &nominal,
        average_game: &average,
        controller_mismatch_pct: controller,
    };

    let text = format!("{}\n{ROBUST_COLUMNS}\n{body}", rec.csv_comment()?);
    write_text(out, &text)?;
    let summary_path = summary.map(Path::to_path_buf).or_else(|| out.map(|p| p.with_extension("summary.json")));
    match summary_path {
        Some(p) => emit_json(&mut rec, &summary_value, Some(&p)),
        None => {
            log::info!("no --summary or --out given; summary not written");
            Ok(())
        }
    }
}

fn io_baseline(ctx: &Ctx, path: &Path, args: &GameArgs, out: Option<&Path>) -> Result<()> {
    let mut rec = RunRecord::start("io-baseline", Value::Null);
    let model = ctx.model(path, &mut rec)?;
    let cfg = game_config(args, model.nodes(), args.ga, args.gd, &mut rec)?;
    rec.config = json!({ "mode": args.mode, "game_config": cfg, "solver": ctx.snapshot() });
    let table = ctx.table(&model, args.mode)?;
    let io = individual_optimization(&cfg, &table)?;
    let cbse = solve_cbbi(&cfg, &table)?;
    let result = json!({
        "io": {
            "a_io": Strategy::from(&io.a_io),
            "d_io": Strategy::from(&io.d_io),
            "realized_payoff": io.realized_payoff,
            "realized_pct": table.percent_of_optimum(io.realized_payoff),
            "payoff_vs_best_response": io.payoff_vs_best_response,
            "payoff_vs_best_response_pct": table.percent_of_optimum(io.payoff_vs_best_response),
        },
        "cbse": equilibrium(&cbse, &table),
        "delta_vs_cbse": {
            "defender_payoff_realized": cbse.defender_payoff + io.realized_payoff,
            "defender_payoff_vs_best_response": cbse.defender_payoff + io.payoff_vs_best_response,
            "attacker_cost": cbse.attacker_cost - io.attacker_cost,
            "defender_cost": cbse.defender_cost - io.defender_cost,
        },
    });
    emit_json(&mut rec, &result, out)
}
