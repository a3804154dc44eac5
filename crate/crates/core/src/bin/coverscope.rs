use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use coverscope::classify::ModelKind;
use coverscope::eval::{
    metric_records, repeated_eval, run_seeds, team_benefit, write_metric_medians, write_metric_plot, write_metrics,
    write_predictions, write_team_deltas, write_team_summary,
};
use coverscope::features::{read_feature_csv, write_feature_csv, FeatureRow, FeatureSet, HmmSummary};
use coverscope::fit::{select_lag, FitResult, LagFit};
use coverscope::gcm::per_feature_suite;
use coverscope::hmm::{read_posterior_csv, write_posterior_csv, DefenderSeries};
use coverscope::pipeline::{self, hash_json, sha256_hex, LearnerKind, PipelineConfig, Provenance};
use coverscope::rng;
use coverscope::synth::simulate;
use coverscope::tracking::{read_series_jsonl, write_series_jsonl, PlaySeries};

#[derive(Parser, Debug)]
#[command(name = "coverscope", version, about = "Man/zone coverage prediction from pre-snap motion tracking")]
struct Cli {
    /// Root seed for every random draw.
    #[arg(long, global = true, default_value_t = 1)]
    seed: u64,
    /// Worker threads (default: available cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// JSON pipeline configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Log verbosity (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug, Serialize)]
enum Command {
    /// Parse, filter and standardize tracking data into play series.
    Ingest(IngestArgs),
    /// Write a synthetic tracking dataset with known assignments.
    Simulate(SimulateArgs),
    /// Fit the mixed-effects HMM.
    FitHmm(FitArgs),
    /// Choose the emission lag by AIC of a homogeneous HMM.
    SelectLag(SelectLagArgs),
    /// Posterior guarding probabilities for every defender and frame.
    Decode(DecodeArgs),
    /// Pre-motion, naive post-motion and HMM features.
    ExtractFeatures(ExtractArgs),
    /// Tune and fit one classifier.
    Train(TrainArgs),
    /// Repeated cross-fitted evaluation of every model and feature set.
    Evaluate(EvaluateArgs),
    /// Conditional independence tests of the added features.
    Gcm(GcmArgs),
    /// Leave-one-offense-out motion benefit.
    TeamAnalysis(TeamArgs),
    /// Every stage in order, skipping stages whose inputs are unchanged.
    RunAll(RunAllArgs),
}

#[derive(Args, Debug, Serialize)]
struct IngestArgs {
    #[arg(long)]
    tracking: PathBuf,
    #[arg(long)]
    plays: PathBuf,
    /// Output directory for `series.jsonl` and `ingest_report.json`.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
struct SimulateArgs {
    /// Override the number of plays.
    #[arg(long)]
    n_plays: Option<usize>,
    /// Output directory for `tracking.csv`, `plays.csv` and `truth.json`.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
struct FitArgs {
    /// Play series from `ingest`.
    #[arg(long)]
    series: PathBuf,
    /// Override the configured lag.
    #[arg(long)]
    lag: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
struct SelectLagArgs {
    #[arg(long)]
    series: PathBuf,
    /// Candidate lags (default from the configuration, 1..=5).
    #[arg(long, value_delimiter = ',')]
    lags: Option<Vec<usize>>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
struct DecodeArgs {
    #[arg(long)]
    series: PathBuf,
    #[arg(long)]
    fit: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
struct ExtractArgs {
    #[arg(long)]
    series: PathBuf,
    /// HMM fit; with `--posteriors`, adds the HMM features.
    #[arg(long, requires = "posteriors")]
    fit: Option<PathBuf>,
    #[arg(long, requires = "fit")]
    posteriors: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Also write the HMM feature summary table here (text).
    #[arg(long)]
    summary: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
enum ModelArg {
    Enet,
    Gbt,
}

impl From<ModelArg> for ModelKind {
    fn from(m: ModelArg) -> Self {
        match m {
            ModelArg::Enet => ModelKind::Enet,
            ModelArg::Gbt => ModelKind::Gbt,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
enum SetArg {
    Pre,
    Naive,
    Hmm,
}

impl From<SetArg> for FeatureSet {
    fn from(s: SetArg) -> Self {
        match s {
            SetArg::Pre => FeatureSet::Pre,
            SetArg::Naive => FeatureSet::Naive,
            SetArg::Hmm => FeatureSet::Hmm,
        }
    }
}

#[derive(Args, Debug, Serialize)]
struct TrainArgs {
    #[arg(long)]
    features: PathBuf,
    #[arg(long, value_enum)]
    model: ModelArg,
    #[arg(long, value_enum)]
    feature_set: SetArg,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
struct EvaluateArgs {
    #[arg(long)]
    features: PathBuf,
    /// Cross-fitting repeats (default from the configuration, 50).
    #[arg(long)]
    repeats: Option<usize>,
    /// Models to evaluate.
    #[arg(long, value_enum, value_delimiter = ',', default_values_t = [ModelArg::Enet, ModelArg::Gbt])]
    models: Vec<ModelArg>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
struct GcmArgs {
    #[arg(long)]
    features: PathBuf,
    /// Feature stage to test against the stage before it.
    #[arg(long, value_enum, default_value_t = SetArg::Hmm)]
    targets: SetArg,
    /// Multiplier draws for the omnibus p-value.
    #[arg(long)]
    draws: Option<usize>,
    #[arg(long, value_enum)]
    learner: Option<LearnerArg>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
enum LearnerArg {
    Gbt,
    Ols,
}

#[derive(Args, Debug, Serialize)]
struct TeamArgs {
    #[arg(long)]
    features: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
struct RunAllArgs {
    #[arg(long)]
    tracking: Option<PathBuf>,
    #[arg(long)]
    plays: Option<PathBuf>,
    #[arg(long)]
    workdir: Option<PathBuf>,
    /// Generate synthetic inputs into `<workdir>/input` first.
    #[arg(long)]
    simulate: bool,
    /// Run every stage even when its inputs are unchanged.
    #[arg(long)]
    force: bool,
}

struct Ctx {
    seed: u64,
    cfg: PipelineConfig,
}

impl Ctx {
    fn provenance(&self, command: &impl Serialize) -> anyhow::Result<Provenance> {
        Ok(Provenance::new(&serde_json::json!({ "command": command, "config": self.cfg }), self.seed)?)
    }
}

fn create_parent(path: &Path) -> anyhow::Result<()> {
    if let Some(p) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(p).with_context(|| format!("creating {}", p.display()))?;
    }
    Ok(())
}

fn load_series(path: &Path) -> anyhow::Result<Vec<PlaySeries>> {
    let s = read_series_jsonl(path).with_context(|| format!("reading {}", path.display()))?;
    if s.is_empty() {
        bail!("{} holds no plays", path.display());
    }
    Ok(s)
}

fn load_features(path: &Path) -> anyhow::Result<Vec<FeatureRow>> {
    read_feature_csv(path).with_context(|| format!("reading {}", path.display()))
}

fn run_ingest(ctx: &Ctx, tracking: &Path, plays: &Path, out: &Path, prov: &Provenance) -> anyhow::Result<()> {
    std::fs::create_dir_all(out)?;
    let (series, report, rejected) = pipeline::ingest(tracking, plays, &ctx.cfg.filter)?;
    let path = out.join("series.jsonl");
    write_series_jsonl(&path, &series)?;
    prov.prepend(&path)?;
    prov.write_json(
        out.join("ingest_report.json"),
        &serde_json::json!({ "retained": report.retained, "rejected_rows": rejected, "excluded": report.excluded }),
    )?;
    println!("retained {} plays, excluded {}, rejected rows {rejected}", report.retained, report.excluded.len());
    Ok(())
}

fn run_simulate(ctx: &Ctx, n_plays: Option<usize>, out: &Path, prov: &Provenance) -> anyhow::Result<()> {
    let mut sc = ctx.cfg.simulate.clone();
    sc.seed = ctx.seed;
    if let Some(n) = n_plays {
        sc.n_plays = n;
    }
    let d = simulate(&sc)?;
    d.write(out)?;
    prov.prepend(out.join("tracking.csv"))?;
    prov.prepend(out.join("plays.csv"))?;
    println!("simulated {} plays into {}", d.plays.len(), out.display());
    Ok(())
}

fn run_fit(ctx: &Ctx, series: &Path, lag: Option<usize>, out: &Path, prov: &Provenance) -> anyhow::Result<FitResult> {
    let s = load_series(series)?;
    let mut fc = ctx.cfg.fit.clone();
    if let Some(l) = lag {
        fc.lag = l;
    }
    let f = pipeline::fit_plays(&s, &fc)?;
    create_parent(out)?;
    prov.write_json(out, &f)?;
    let t = &f.theta_hat;
    println!(
        "beta0 {:.4} beta1 {:.4} sigma {:.4} sigma_u {:.4} sigma_v {:.4} sigma_w {:.4} loglik {:.4} converged {}",
        t.beta0, t.beta1, t.sigma, t.sigma_u, t.sigma_v, t.sigma_w, f.loglik, f.converged
    );
    Ok(f)
}

fn write_lag_table(path: &Path, table: &[LagFit], best: usize, prov: &Provenance) -> anyhow::Result<()> {
    let mut out = format!("# {}\n", prov.line()).into_bytes();
    {
        let mut w = csv::Writer::from_writer(&mut out);
        w.write_record(["lag", "loglik", "aic", "n_params", "sigma", "iterations", "converged", "selected"])?;
        for f in table {
            w.write_record([
                f.lag.to_string(),
                f.loglik.to_string(),
                f.aic.to_string(),
                f.n_params.to_string(),
                f.sigma.to_string(),
                f.iterations.to_string(),
                f.converged.to_string(),
                (f.lag == best).to_string(),
            ])?;
        }
        w.flush()?;
    }
    create_parent(path)?;
    std::fs::write(path, out)?;
    Ok(())
}

fn run_select_lag(ctx: &Ctx, a: &SelectLagArgs, prov: &Provenance) -> anyhow::Result<()> {
    let s = load_series(&a.series)?;
    let series: Vec<DefenderSeries> = s.iter().flat_map(DefenderSeries::from_play).collect();
    let lags = a.lags.clone().unwrap_or_else(|| ctx.cfg.lags.clone());
    let (best, table) = select_lag(&series, &lags, &ctx.cfg.fit)?;
    write_lag_table(&a.out, &table, best, prov)?;
    println!("selected lag {best}");
    Ok(())
}

fn run_decode(series: &Path, fit: &Path, out: &Path, prov: &Provenance) -> anyhow::Result<()> {
    let s = load_series(series)?;
    let f = FitResult::load(fit).with_context(|| format!("reading {}", fit.display()))?;
    let d = pipeline::decode(&s, &f)?;
    create_parent(out)?;
    write_posterior_csv(out, &d, Some(&prov.line()))?;
    println!("decoded {} plays", d.len());
    Ok(())
}

fn run_extract(
    series: &Path,
    hmm: Option<(&Path, &Path)>,
    out: &Path,
    summary: Option<&Path>,
    prov: &Provenance,
) -> anyhow::Result<Vec<FeatureRow>> {
    let s = load_series(series)?;
    let rows = match hmm {
        Some((fit, post)) => {
            let f = FitResult::load(fit).with_context(|| format!("reading {}", fit.display()))?;
            let d = read_posterior_csv(post).with_context(|| format!("reading {}", post.display()))?;
            pipeline::extract_features(&s, Some((&f, &d)))?
        }
        None => pipeline::extract_features(&s, None)?,
    };
    create_parent(out)?;
    write_feature_csv(out, &rows, Some(&prov.line()))?;
    if hmm.is_some() {
        let t = HmmSummary::from_rows(&rows)?;
        print!("{}", t.to_text());
        if let Some(p) = summary {
            create_parent(p)?;
            std::fs::write(p, format!("# {}\n{}", prov.line(), t.to_text()))?;
            let csv_path = p.with_extension("csv");
            t.write_csv(&csv_path)?;
            prov.prepend(&csv_path)?;
        }
    }
    println!("{} feature rows", rows.len());
    Ok(rows)
}

fn run_train(ctx: &Ctx, a: &TrainArgs, prov: &Provenance) -> anyhow::Result<()> {
    let rows = load_features(&a.features)?;
    let m = coverscope::eval::fit_rows(&rows, a.model.into(), a.feature_set.into(), &ctx.cfg.eval, ctx.seed)?;
    create_parent(&a.out)?;
    prov.write_json(&a.out, &m)?;
    println!("{:?} cv logloss {:.6}", m.hyper, m.meta.cv_logloss.unwrap_or(f64::NAN));
    Ok(())
}

fn run_evaluate(ctx: &Ctx, features: &Path, repeats: usize, models: &[ModelKind], out: &Path, prov: &Provenance) -> anyhow::Result<()> {
    let rows = load_features(features)?;
    if repeats == 0 {
        bail!("need at least one repeat");
    }
    let runs = repeated_eval(&rows, models, &FeatureSet::ALL, &run_seeds(ctx.seed, repeats), &ctx.cfg.eval)?;
    std::fs::create_dir_all(out)?;
    let rec = metric_records(&runs);
    let line = prov.line();
    write_metrics(out.join("metrics.csv"), &rec, Some(&line))?;
    write_metric_plot(out.join("metrics_plot.csv"), &rec, Some(&line))?;
    write_metric_medians(out.join("metric_medians.csv"), &rec, Some(&line))?;
    write_predictions(out.join("predictions.csv"), &runs, Some(&line))?;
    for (m, k, s, v) in coverscope::eval::median_metrics(&rec) {
        println!("{:<9} {:<5} {:<6} {v:.4}", m, k.as_str(), s.as_str());
    }
    Ok(())
}

fn run_gcm(ctx: &Ctx, features: &Path, targets: FeatureSet, draws: usize, learner: LearnerKind, out: &Path, prov: &Provenance) -> anyhow::Result<()> {
    let rows = load_features(features)?;
    let suite = per_feature_suite(&rows, targets, learner.learner().as_ref(), draws, rng::derive_seed(ctx.seed, "cli.gcm", 0))?;
    create_parent(out)?;
    suite.write_csv(out, Some(&prov.line()))?;
    for r in suite.per_feature.iter().chain(std::iter::once(&suite.omnibus)) {
        let name = if r.target_features.len() == 1 { r.target_features[0].as_str() } else { "omnibus" };
        println!("{name:<18} T {:>8.4}  p {:.4e}", r.statistic, r.p_value);
    }
    Ok(())
}

fn run_team(ctx: &Ctx, features: &Path, out: &Path, prov: &Provenance) -> anyhow::Result<()> {
    let rows = load_features(features)?;
    let a = team_benefit(&rows, &ctx.cfg.eval, rng::derive_seed(ctx.seed, "cli.team", 0))?;
    std::fs::create_dir_all(out)?;
    write_team_summary(out.join("team_summary.csv"), &a, Some(&prov.line()))?;
    write_team_deltas(out.join("team_deltas.csv"), &a, Some(&prov.line()))?;
    for t in &a.teams {
        println!("{:<8} plays {:>4} improved {:>4} ({:.3}) median delta {:+.4}", t.team, t.n_motion_plays, t.n_improved, t.pct_improved, t.median_delta);
    }
    for (t, why) in &a.skipped {
        println!("{t:<8} skipped: {why}");
    }
    Ok(())
}

#[derive(serde::Serialize, serde::Deserialize, Default)]
struct Manifest {
    stages: std::collections::BTreeMap<String, StageRecord>,
}

#[derive(serde::Serialize, serde::Deserialize, Clone, PartialEq)]
struct StageRecord {
    key: String,
    outputs: std::collections::BTreeMap<String, String>,
}

fn file_hash(path: &Path) -> anyhow::Result<String> {
    Ok(sha256_hex(&std::fs::read(path).with_context(|| format!("hashing {}", path.display()))?))
}

/// Files under `path`, or `path` itself, in sorted order.
fn files(path: &Path) -> Vec<PathBuf> {
    if path.is_dir() {
        let mut v: Vec<PathBuf> = std::fs::read_dir(path)
            .into_iter()
            .flatten()
            .flatten()
            .map(|e| e.path())
            .flat_map(|p| files(&p))
            .collect();
        v.sort();
        v
    } else if path.exists() {
        vec![path.to_path_buf()]
    } else {
        Vec::new()
    }
}

struct Runner {
    manifest_path: PathBuf,
    manifest: Manifest,
    force: bool,
}

impl Runner {
    fn outputs(outs: &[PathBuf]) -> anyhow::Result<std::collections::BTreeMap<String, String>> {
        let mut m = std::collections::BTreeMap::new();
        for o in outs {
            for f in files(o) {
                m.insert(f.display().to_string(), file_hash(&f)?);
            }
        }
        Ok(m)
    }

    /// Run `f` unless the stage key and every recorded output still match.
    fn stage(
        &mut self,
        name: &str,
        inputs: &[&Path],
        settings: &impl Serialize,
        outs: &[PathBuf],
        f: impl FnOnce() -> anyhow::Result<()>,
    ) -> anyhow::Result<()> {
        let mut parts = Vec::new();
        for i in inputs {
            for p in files(i) {
                parts.push((p.display().to_string(), file_hash(&p)?));
            }
        }
        let key = hash_json(&serde_json::json!({ "inputs": parts, "settings": settings }))?;
        if !self.force {
            if let Some(rec) = self.manifest.stages.get(name) {
                if rec.key == key && !rec.outputs.is_empty() && Self::outputs(outs)? == rec.outputs {
                    println!("[{name}] up to date, skipped");
                    return Ok(());
                }
            }
        }
        println!("[{name}] running");
        let t = std::time::Instant::now();
        f().with_context(|| format!("stage `{name}` failed"))?;
        tracing::info!(stage = name, seconds = t.elapsed().as_secs_f64(), "stage finished");
        self.manifest.stages.insert(name.to_string(), StageRecord { key, outputs: Self::outputs(outs)? });
        std::fs::write(&self.manifest_path, serde_json::to_string_pretty(&self.manifest)?)?;
        Ok(())
    }
}

fn run_all(ctx: &Ctx, a: &RunAllArgs) -> anyhow::Result<()> {
    let workdir = a.workdir.clone().or_else(|| ctx.cfg.workdir.clone()).context("no workdir given")?;
    std::fs::create_dir_all(&workdir)?;
    let manifest_path = workdir.join("manifest.json");
    let manifest = match std::fs::read_to_string(&manifest_path) {
        Ok(s) => serde_json::from_str(&s).unwrap_or_default(),
        Err(_) => Manifest::default(),
    };
    let mut r = Runner { manifest_path, manifest, force: a.force };
    let prov = |stage: &str| ctx.provenance(&serde_json::json!({ "run_all": stage }));
    let seed = ctx.seed;

    let (tracking, plays) = if a.simulate {
        let input = workdir.join("input");
        let p = prov("simulate")?;
        r.stage("simulate", &[], &(&ctx.cfg.simulate, seed), &[input.clone()], || run_simulate(ctx, None, &input, &p))?;
        (input.join("tracking.csv"), input.join("plays.csv"))
    } else {
        (
            a.tracking.clone().or_else(|| ctx.cfg.tracking.clone()).context("no tracking file given")?,
            a.plays.clone().or_else(|| ctx.cfg.plays.clone()).context("no plays file given")?,
        )
    };

    let ing = workdir.join("ingest");
    let series = ing.join("series.jsonl");
    let p = prov("ingest")?;
    r.stage("ingest", &[&tracking, &plays], &ctx.cfg.filter, &[series.clone(), ing.join("ingest_report.json")], || {
        run_ingest(ctx, &tracking, &plays, &ing, &p)
    })?;

    let features = workdir.join("features.csv");
    let st = &ctx.cfg.stages;
    if st.fit_hmm {
        let fit = workdir.join("fit.json");
        let post = workdir.join("posteriors.csv");
        let p = prov("fit-hmm")?;
        r.stage("fit-hmm", &[&series], &ctx.cfg.fit, &[fit.clone()], || run_fit(ctx, &series, None, &fit, &p).map(|_| ()))?;
        let p = prov("decode")?;
        r.stage("decode", &[&series, &fit], &(), &[post.clone()], || run_decode(&series, &fit, &post, &p))?;
        let summary = workdir.join("hmm_summary.txt");
        let p = prov("extract-features")?;
        r.stage(
            "extract-features",
            &[&series, &fit, &post],
            &(),
            &[features.clone(), summary.clone(), summary.with_extension("csv")],
            || run_extract(&series, Some((&fit, &post)), &features, Some(&summary), &p).map(|_| ()),
        )?;
    } else {
        let p = prov("extract-features")?;
        r.stage("extract-features", &[&series], &(), &[features.clone()], || {
            run_extract(&series, None, &features, None, &p).map(|_| ())
        })?;
    }

    if st.evaluate {
        let out = workdir.join("evaluate");
        let p = prov("evaluate")?;
        r.stage("evaluate", &[&features], &(&ctx.cfg.eval, ctx.cfg.repeats, seed), &[out.clone()], || {
            run_evaluate(ctx, &features, ctx.cfg.repeats, &ModelKind::ALL, &out, &p)
        })?;
    }
    if st.gcm && st.fit_hmm {
        let out = workdir.join("gcm.csv");
        let p = prov("gcm")?;
        r.stage("gcm", &[&features], &(&ctx.cfg.gcm, seed), &[out.clone()], || {
            run_gcm(ctx, &features, FeatureSet::Hmm, ctx.cfg.gcm.draws, ctx.cfg.gcm.learner, &out, &p)
        })?;
    }
    if st.team_analysis && st.fit_hmm {
        let out = workdir.join("team");
        let p = prov("team-analysis")?;
        r.stage("team-analysis", &[&features], &(&ctx.cfg.eval, seed), &[out.clone()], || run_team(ctx, &features, &out, &p))?;
    }
    Ok(())
}

fn dispatch(cli: &Cli, ctx: &Ctx) -> anyhow::Result<()> {
    let prov = ctx.provenance(&cli.command)?;
    match &cli.command {
        Command::Ingest(a) => run_ingest(ctx, &a.tracking, &a.plays, &a.out, &prov),
        Command::Simulate(a) => run_simulate(ctx, a.n_plays, &a.out, &prov),
        Command::FitHmm(a) => run_fit(ctx, &a.series, a.lag, &a.out, &prov).map(|_| ()),
        Command::SelectLag(a) => run_select_lag(ctx, a, &prov),
        Command::Decode(a) => run_decode(&a.series, &a.fit, &a.out, &prov),
        Command::ExtractFeatures(a) => {
            let hmm = a.fit.as_deref().zip(a.posteriors.as_deref());
            run_extract(&a.series, hmm, &a.out, a.summary.as_deref(), &prov).map(|_| ())
        }
        Command::Train(a) => run_train(ctx, a, &prov),
        Command::Evaluate(a) => {
            let models: Vec<ModelKind> = a.models.iter().map(|&m| m.into()).collect();
            run_evaluate(ctx, &a.features, a.repeats.unwrap_or(ctx.cfg.repeats), &models, &a.out, &prov)
        }
        Command::Gcm(a) => {
            let learner = match a.learner {
                Some(LearnerArg::Gbt) => LearnerKind::Gbt,
                Some(LearnerArg::Ols) => LearnerKind::Ols,
                None => ctx.cfg.gcm.learner,
            };
            run_gcm(ctx, &a.features, a.targets.into(), a.draws.unwrap_or(ctx.cfg.gcm.draws), learner, &a.out, &prov)
        }
        Command::TeamAnalysis(a) => run_team(ctx, &a.features, &a.out, &prov),
        Command::RunAll(a) => run_all(ctx, a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| tracing_subscriber::EnvFilter::new(level)),
        )
        .with_writer(std::io::stderr)
        .init();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::FAILURE;
        }
    }
    let cfg = match &cli.config {
        Some(p) => match PipelineConfig::load(p) {
            Ok(c) => c,
            Err(e) => {
                eprintln!("error: reading {}: {e}", p.display());
                return ExitCode::FAILURE;
            }
        },
        None => PipelineConfig::default(),
    };
    let ctx = Ctx { seed: cli.seed, cfg };
    match dispatch(&cli, &ctx) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
