use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};

use super::config::{Experiment, ExperimentConfig, Format};
use crate::dynamics::{
    exact_generator, renewal_experiment, simulate, timescales, visit_experiment, write_visits_csv,
    SimConfig, TrackedSet,
};
use crate::env::{
    bin_scan, binned_top_k, derive, top_k, write_bins_csv, write_records_csv, DenseLandscape,
    EnergyOracle, ExtremeRecord, ModelParams,
};
use crate::error::{Error, Result};
use crate::hitting::{kemperman_grid, write_grid_csv};
use crate::kprocess::{simulate_k, truncation_diagnostic, KInit, KObservable, KParams};
use crate::pointproc::{thm1_suite, write_thm1_csv, Thm1Case};
use crate::seeds::{seed_derivation, StreamTag};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedRecord {
    pub replica: usize,
    pub tag: StreamTag,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileRecord {
    pub path: String,
    pub sha256: String,
}

/// Everything needed to replay a run and check its outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config: ExperimentConfig,
    pub version: String,
    pub seeds: Vec<SeedRecord>,
    pub wall_times: Vec<f64>,
    pub total_wall_time: f64,
    pub summary: serde_json::Value,
    pub incomplete: bool,
    pub files: Vec<FileRecord>,
}

impl RunManifest {
    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_reader(File::open(path)?)?)
    }
}

pub const MANIFEST_FILE: &str = "manifest.json";

struct Output {
    dir: PathBuf,
    format: Format,
    files: Vec<FileRecord>,
}

impl Output {
    fn new(dir: &Path, format: Format) -> Result<Self> {
        std::fs::create_dir_all(dir)?;
        Ok(Output {
            dir: dir.to_path_buf(),
            format,
            files: Vec::new(),
        })
    }

    fn write_with(
        &mut self,
        name: &str,
        f: impl FnOnce(&mut BufWriter<File>) -> Result<()>,
    ) -> Result<()> {
        let path = self.dir.join(name);
        let mut w = BufWriter::new(File::create(&path)?);
        f(&mut w)?;
        w.flush()?;
        drop(w);
        let digest = Sha256::digest(std::fs::read(&path)?);
        let sha256 = digest.iter().map(|b| format!("{b:02x}")).collect();
        self.files.push(FileRecord {
            path: name.to_string(),
            sha256,
        });
        Ok(())
    }

    fn json<T: Serialize + ?Sized>(&mut self, name: &str, value: &T) -> Result<()> {
        self.write_with(name, |w| {
            serde_json::to_writer_pretty(&mut *w, value)?;
            writeln!(w)?;
            Ok(())
        })
    }

    /// Writes rows as `stem.csv` or `stem.json` depending on the format.
    fn table<T: Serialize>(&mut self, stem: &str, rows: &[T]) -> Result<()> {
        match self.format {
            Format::Json => self.json(&format!("{stem}.json"), rows),
            Format::Csv => self.write_with(&format!("{stem}.csv"), |w| {
                let mut c = csv::Writer::from_writer(w);
                for r in rows {
                    c.serialize(r)?;
                }
                c.flush()?;
                Ok(())
            }),
        }
    }
}

struct Run<'a> {
    cfg: &'a ExperimentConfig,
    model: ModelParams,
    seeds: Vec<SeedRecord>,
    wall_times: Vec<f64>,
    incomplete: bool,
    out: Output,
}

impl Run<'_> {
    fn seed(&mut self, replica: usize, tag: StreamTag) -> u64 {
        let seed = seed_derivation(self.cfg.seed, replica as u64, tag);
        self.seeds.push(SeedRecord { replica, tag, seed });
        seed
    }

    fn seeds(&mut self, tag: StreamTag) -> Vec<u64> {
        (0..self.cfg.replicas).map(|i| self.seed(i, tag)).collect()
    }

    fn oracle(&self, env_seed: u64) -> Result<EnergyOracle> {
        EnergyOracle::new(self.model.with_seed(env_seed))
    }

    fn tracked(&self, oracle: &EnergyOracle) -> Result<TrackedSet> {
        TrackedSet::new(&top_k(oracle, self.cfg.k)?, self.cfg.l, self.cfg.m)
    }
}

fn timed<T>(f: impl FnOnce() -> Result<T>) -> Result<(T, f64)> {
    let t = Instant::now();
    let v = f()?;
    Ok((v, t.elapsed().as_secs_f64()))
}

/// Validates the configuration, runs the experiment, and writes data files
/// plus a manifest into `config.out`.
pub fn run(config: &ExperimentConfig) -> Result<RunManifest> {
    let model = config.validate()?;
    let started = Instant::now();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers.unwrap_or(0))
        .build()
        .map_err(|e| Error::Config(e.to_string()))?;
    let mut run = Run {
        cfg: config,
        model,
        seeds: Vec::new(),
        wall_times: Vec::new(),
        incomplete: false,
        out: Output::new(&config.out, config.format)?,
    };
    let summary = pool.install(|| dispatch(&mut run))?;
    let manifest = RunManifest {
        config: config.clone(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        seeds: run.seeds,
        wall_times: run.wall_times,
        total_wall_time: started.elapsed().as_secs_f64(),
        summary,
        incomplete: run.incomplete,
        files: run.out.files,
    };
    let file = BufWriter::new(File::create(config.out.join(MANIFEST_FILE))?);
    serde_json::to_writer_pretty(file, &manifest)?;
    Ok(manifest)
}

/// Replays the configuration stored in a manifest, optionally into another directory.
pub fn rerun(manifest: &Path, out: Option<&Path>) -> Result<RunManifest> {
    let mut config = RunManifest::load(manifest)?.config;
    if let Some(dir) = out {
        config.out = dir.to_path_buf();
    }
    run(&config)
}

fn dispatch(run: &mut Run) -> Result<serde_json::Value> {
    match run.cfg.experiment {
        Experiment::Params => params(run),
        Experiment::EnvTopk => env_topk(run),
        Experiment::EnvBins => env_bins(run),
        Experiment::Thm1 => thm1(run),
        Experiment::GibbsCheck => gibbs_check(run),
        Experiment::Simulate => simulate_exp(run),
        Experiment::Occupation => occupation(run),
        Experiment::Visits => visits(run),
        Experiment::Renewal => renewal(run),
        Experiment::Kproc => kproc(run),
        Experiment::Kemperman => kemperman(run),
    }
}

fn params(run: &mut Run) -> Result<serde_json::Value> {
    let d = derive(run.model)?;
    let scales = timescales(&d, run.cfg.l).ok();
    let value = json!({ "derived": d, "timescales": scales });
    run.out.json("params.json", &value)?;
    Ok(json!({
        "beta_star": d.beta_star,
        "bar_beta_ft": d.bar_beta_ft,
        "alpha": d.alpha,
        "ft_visible": d.ft_visible,
        "N1": d.n1,
        "N2": d.n2,
    }))
}

fn records_per_replica(run: &mut Run) -> Result<Vec<Vec<ExtremeRecord>>> {
    let seeds = run.seeds(StreamTag::Environment);
    let k = run.cfg.k;
    let model = run.model;
    let results: Vec<(Vec<ExtremeRecord>, f64)> = seeds
        .par_iter()
        .map(|&s| timed(|| top_k(&EnergyOracle::new(model.with_seed(s))?, k)))
        .collect::<Result<_>>()?;
    run.wall_times.extend(results.iter().map(|r| r.1));
    Ok(results.into_iter().map(|r| r.0).collect())
}

fn env_topk(run: &mut Run) -> Result<serde_json::Value> {
    let all = records_per_replica(run)?;
    match run.cfg.format {
        Format::Csv => {
            for (i, recs) in all.iter().enumerate() {
                run.out
                    .write_with(&format!("topk-{i:04}.csv"), |w| write_records_csv(w, recs))?;
            }
        }
        Format::Json => run.out.json("topk.json", &all)?,
    }
    let top: Vec<f64> = all
        .iter()
        .filter_map(|r| r.first())
        .map(|r| r.xi_total)
        .collect();
    Ok(json!({ "replicas": all.len(), "rank1_xi": top }))
}

#[derive(Serialize)]
struct BinAgreementRow {
    replica: usize,
    seed: u64,
    agree: bool,
    all_inside: bool,
    max_count_z: f64,
}

fn env_bins(run: &mut Run) -> Result<serde_json::Value> {
    let seeds = run.seeds(StreamTag::Environment);
    let (cfg, model) = (run.cfg, run.model);
    let results: Vec<_> = seeds
        .par_iter()
        .map(|&s| {
            timed(|| {
                let o = EnergyOracle::new(model.with_seed(s))?;
                let bins = bin_scan(&o, cfg.delta, cfg.eps)?;
                let global = top_k(&o, cfg.k)?;
                let binned = binned_top_k(&o, cfg.delta, cfg.eps, cfg.k)?;
                Ok((bins, global, binned))
            })
        })
        .collect::<Result<_>>()?;
    let mut rows = Vec::new();
    for (i, ((bins, global, binned), wall)) in results.iter().enumerate() {
        run.wall_times.push(*wall);
        let states = 1u64 << derive(run.model)?.n1;
        let max_count_z = bins
            .iter()
            .map(|b| {
                (b.count as f64 - b.expected_count).abs()
                    / b.count_sd(states).max(f64::MIN_POSITIVE)
            })
            .fold(0.0, f64::max);
        let grid = crate::env::BinGrid::new(&run.oracle(seeds[i])?, cfg.delta, cfg.eps)?;
        rows.push(BinAgreementRow {
            replica: i,
            seed: seeds[i],
            agree: global
                .iter()
                .map(|r| r.xi_total)
                .eq(binned.iter().map(|r| r.xi_total)),
            all_inside: global.iter().all(|r| grid.bin_of(r.xi1).is_some()),
            max_count_z,
        });
        match cfg.format {
            Format::Csv => run
                .out
                .write_with(&format!("bins-{i:04}.csv"), |w| write_bins_csv(w, bins))?,
            Format::Json => run.out.json(&format!("bins-{i:04}.json"), bins)?,
        }
    }
    run.out.table("agreement", &rows)?;
    let agree = rows.iter().filter(|r| r.agree).count() as f64 / rows.len() as f64;
    Ok(json!({ "replicas": rows.len(), "agreement_fraction": agree }))
}

fn thm1(run: &mut Run) -> Result<serde_json::Value> {
    let all = records_per_replica(run)?;
    let d = derive(run.model)?;
    let report = thm1_suite(&all, &d, Thm1Case::of(&d))?;
    match run.cfg.format {
        Format::Csv => run
            .out
            .write_with("thm1.csv", |w| write_thm1_csv(w, &all))?,
        Format::Json => run.out.json(
            "thm1.json",
            &all.iter().filter_map(|r| r.first()).collect::<Vec<_>>(),
        )?,
    }
    run.out.json("thm1_report.json", &report)?;
    Ok(serde_json::to_value(&report)?)
}

#[derive(Serialize)]
struct GibbsRow {
    replica: usize,
    seed: u64,
    max_rel_err: f64,
    detailed_balance_err: f64,
}

fn gibbs_check(run: &mut Run) -> Result<serde_json::Value> {
    let seeds = run.seeds(StreamTag::Environment);
    let model = run.model;
    let results: Vec<((f64, f64), f64)> = seeds
        .par_iter()
        .map(|&s| {
            timed(|| {
                let env = DenseLandscape::from_oracle(&EnergyOracle::new(model.with_seed(s))?)?;
                let g = exact_generator(&env)?;
                Ok((g.gibbs_rel_err(), g.detailed_balance_err()))
            })
        })
        .collect::<Result<_>>()?;
    let rows: Vec<GibbsRow> = results
        .iter()
        .enumerate()
        .map(|(i, ((e, db), _))| GibbsRow {
            replica: i,
            seed: seeds[i],
            max_rel_err: *e,
            detailed_balance_err: *db,
        })
        .collect();
    run.wall_times.extend(results.iter().map(|r| r.1));
    run.out.table("gibbs", &rows)?;
    let worst = rows.iter().map(|r| r.max_rel_err).fold(0.0, f64::max);
    Ok(json!({ "max_rel_err": worst, "passes": worst <= 1e-8 }))
}

fn sim_config(cfg: &ExperimentConfig) -> SimConfig {
    SimConfig {
        engine: cfg.engine,
        horizon: cfg.horizon,
        scale: cfg.scale,
        budget: cfg.budget,
        renewal: false,
        class_occupation: false,
    }
}

fn simulate_exp(run: &mut Run) -> Result<serde_json::Value> {
    let env_seed = run.seed(0, StreamTag::Environment);
    let seeds = run.seeds(StreamTag::Dynamics);
    let oracle = run.oracle(env_seed)?;
    let env = DenseLandscape::from_oracle(&oracle)?;
    let tracked = run.tracked(&oracle)?;
    let scales = timescales(env_derived(&env), run.cfg.l)?;
    let sc = sim_config(run.cfg);
    let reports: Vec<_> = seeds
        .par_iter()
        .map(|&s| {
            simulate(
                &env,
                &tracked,
                &scales,
                &sc,
                &mut ChaCha8Rng::seed_from_u64(s),
            )
        })
        .collect::<Result<_>>()?;
    for (i, r) in reports.iter().enumerate() {
        run.wall_times.push(r.wall_time);
        run.incomplete |= r.incomplete;
        run.out.json(&format!("trajectory-{i:04}.json"), r)?;
        if run.cfg.format == Format::Csv {
            run.out.write_with(&format!("visits-{i:04}.csv"), |w| {
                write_visits_csv(w, &r.occupation)
            })?;
        }
    }
    run.out.json("tracked.json", &tracked)?;
    let events: u64 = reports.iter().map(|r| r.event_count).sum();
    Ok(json!({ "replicas": reports.len(), "events": events, "incomplete": run.incomplete }))
}

fn env_derived(env: &DenseLandscape) -> &crate::env::DerivedParams {
    use crate::env::Landscape;
    env.derived()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OccupationRow {
    pub replica: usize,
    /// Empty for the lumped "other" state.
    pub rank: Option<usize>,
    pub group: String,
    pub w: Option<f64>,
    pub time: f64,
    pub fraction: f64,
    /// Share of the time spent in `I_M`.
    pub share: Option<f64>,
    pub predicted_share: Option<f64>,
}

fn occupation(run: &mut Run) -> Result<serde_json::Value> {
    let env_seeds = run.seeds(StreamTag::Environment);
    let dyn_seeds = run.seeds(StreamTag::Dynamics);
    let (cfg, model) = (run.cfg, run.model);
    let sc = sim_config(cfg);
    let results: Vec<_> = env_seeds
        .par_iter()
        .zip(&dyn_seeds)
        .map(|(&es, &ds)| {
            let oracle = EnergyOracle::new(model.with_seed(es))?;
            let env = DenseLandscape::from_oracle(&oracle)?;
            let tracked = TrackedSet::new(&top_k(&oracle, cfg.k)?, cfg.l, cfg.m)?;
            let scales = timescales(env_derived(&env), cfg.l)?;
            let report = simulate(
                &env,
                &tracked,
                &scales,
                &sc,
                &mut ChaCha8Rng::seed_from_u64(ds),
            )?;
            let shares = tracked.predicted_shares(&env, &tracked.i_m)?;
            Ok((tracked, report, shares))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::new();
    let (mut worst_rel, mut worst_outside, mut empty) = (0.0f64, 0.0f64, 0usize);
    for (i, (tracked, report, shares)) in results.iter().enumerate() {
        run.wall_times.push(report.wall_time);
        run.incomplete |= report.incomplete;
        let i_time: f64 = tracked
            .i_m
            .iter()
            .map(|&r| report.occupation_of(r).unwrap_or(0.0))
            .sum();
        if tracked.i_m.is_empty() {
            empty += 1;
        }
        for o in &report.occupation {
            let pos = tracked.i_m.iter().position(|&r| r == o.rank);
            let group = if pos.is_some() {
                "I"
            } else if tracked.j_m.contains(&o.rank) {
                "J"
            } else {
                "tracked"
            };
            let share = pos.map(|_| o.time / i_time);
            let predicted = pos.map(|p| shares[p]);
            if let (Some(s), Some(p)) = (share, predicted) {
                worst_rel = worst_rel.max((s - p).abs() / p);
            }
            rows.push(OccupationRow {
                replica: i,
                rank: Some(o.rank),
                group: group.into(),
                w: tracked.class(o.rank).map(|c| c.w),
                time: o.time,
                fraction: o.time / report.total_time,
                share,
                predicted_share: predicted,
            });
        }
        rows.push(OccupationRow {
            replica: i,
            rank: None,
            group: "other".into(),
            w: None,
            time: report.other,
            fraction: report.other / report.total_time,
            share: None,
            predicted_share: None,
        });
        worst_outside = worst_outside.max(1.0 - i_time / report.total_time);
    }
    run.out.table("occupation", &rows)?;
    Ok(json!({
        "replicas": results.len(),
        "replicas_with_empty_I_M": empty,
        "max_share_rel_err": worst_rel,
        "max_fraction_outside_I_M": worst_outside,
        "incomplete": run.incomplete,
    }))
}

fn visits(run: &mut Run) -> Result<serde_json::Value> {
    let env_seed = run.seed(0, StreamTag::Environment);
    let seed = run.seed(0, StreamTag::Visits);
    let oracle = run.oracle(env_seed)?;
    let env = DenseLandscape::from_oracle(&oracle)?;
    let tracked = run.tracked(&oracle)?;
    let scales = timescales(env_derived(&env), run.cfg.l)?;
    let (report, wall) = timed(|| {
        visit_experiment(
            &env,
            &tracked,
            run.cfg.rank,
            &scales,
            run.cfg.scale,
            run.cfg.replicas,
            &mut ChaCha8Rng::seed_from_u64(seed),
        )
    })?;
    run.wall_times.push(wall);
    match run.cfg.format {
        Format::Csv => run.out.write_with("visits.csv", |w| {
            let occ = crate::dynamics::RankOccupation {
                rank: report.rank,
                sigma1: report.sigma1,
                time: report.psi.mean * report.psi.n as f64,
                visits: report.visits.clone(),
            };
            write_visits_csv(w, std::slice::from_ref(&occ))
        })?,
        Format::Json => run.out.json("visits.json", &report.visits)?,
    }
    let mut summary = serde_json::to_value(&report)?;
    if let Some(obj) = summary.as_object_mut() {
        obj.remove("visits");
    }
    run.out.json("visits_report.json", &summary)?;
    Ok(summary)
}

#[derive(Serialize)]
struct RenewalRow {
    rank: usize,
    in_i: bool,
    mean: f64,
    se: f64,
    predicted_mean: f64,
    share: f64,
    share_se: f64,
    predicted_share: f64,
    entries_mean: Option<f64>,
}

fn renewal(run: &mut Run) -> Result<serde_json::Value> {
    let env_seed = run.seed(0, StreamTag::Environment);
    let seed = run.seed(0, StreamTag::Renewal);
    let oracle = run.oracle(env_seed)?;
    let env = DenseLandscape::from_oracle(&oracle)?;
    let tracked = run.tracked(&oracle)?;
    let scales = timescales(env_derived(&env), run.cfg.l)?;
    let sc = sim_config(run.cfg);
    let (report, wall) = timed(|| {
        renewal_experiment(
            &env,
            &tracked,
            &scales,
            &sc,
            &mut ChaCha8Rng::seed_from_u64(seed),
        )
    })?;
    run.wall_times.push(wall);
    run.incomplete |= report.incomplete;
    let rows: Vec<RenewalRow> = report
        .terms
        .iter()
        .map(|t| RenewalRow {
            rank: t.rank,
            in_i: t.in_i,
            mean: t.mean.mean,
            se: t.mean.se,
            predicted_mean: t.predicted_mean,
            share: t.share.ratio,
            share_se: t.share.se,
            predicted_share: t.predicted_share,
            entries_mean: t.entries.map(|e| e.mean),
        })
        .collect();
    run.out.table("renewal", &rows)?;
    run.out.json("renewal_report.json", &report)?;
    Ok(
        json!({ "excursions": report.excursions, "reference": report.reference, "incomplete": report.incomplete }),
    )
}

#[derive(Serialize)]
struct KRow {
    replica: usize,
    state: usize,
    gamma: f64,
    time: f64,
    fraction: f64,
    stationary: f64,
    entries: u64,
}

fn kproc(run: &mut Run) -> Result<serde_json::Value> {
    let spec = run
        .cfg
        .kparams
        .clone()
        .ok_or_else(|| Error::Config("kproc needs kparams".into()))?;
    let params = KParams::from_spec(&spec)?;
    let seeds = run.seeds(StreamTag::KProcess);
    let horizon = run.cfg.horizon;
    let reports: Vec<_> = seeds
        .par_iter()
        .map(|&s| {
            timed(|| {
                simulate_k(
                    &params,
                    horizon,
                    KInit::Uniform,
                    &mut ChaCha8Rng::seed_from_u64(s),
                )
            })
        })
        .collect::<Result<_>>()?;
    let stationary = params.stationary();
    let mut rows = Vec::new();
    let mut worst = 0.0f64;
    for (i, (r, wall)) in reports.iter().enumerate() {
        run.wall_times.push(*wall);
        for (x, f) in r.fractions().into_iter().enumerate() {
            worst = worst.max((f - stationary[x]).abs());
            rows.push(KRow {
                replica: i,
                state: x + 1,
                gamma: params.gamma[x],
                time: r.occupation[x],
                fraction: f,
                stationary: stationary[x],
                entries: r.transitions[x],
            });
        }
    }
    run.out.table("kproc", &rows)?;
    run.out.json("kparams.json", &params)?;
    let mut summary = json!({ "M": params.m, "max_abs_fraction_err": worst });
    if let Some(levels) = &run.cfg.levels {
        let obs = run.cfg.observable.unwrap_or(KObservable::Occupation(1));
        let diag = truncation_diagnostic(&params.gamma, obs, levels)?;
        run.out.table("truncation", &diag.rows)?;
        summary["truncation_bounded"] = json!(diag.bounded);
    }
    Ok(summary)
}

fn kemperman(run: &mut Run) -> Result<serde_json::Value> {
    let ns = run.cfg.ns.clone().unwrap_or_default();
    let qs = run.cfg.qs.clone().unwrap_or_default();
    let (rows, wall) = timed(|| kemperman_grid(&ns, &qs))?;
    run.wall_times.push(wall);
    match run.cfg.format {
        Format::Csv => run
            .out
            .write_with("kemperman.csv", |w| write_grid_csv(w, &rows))?,
        Format::Json => run.out.json("kemperman.json", &rows)?,
    }
    let worst = rows.iter().map(|r| r.rel_err).fold(0.0, f64::max);
    Ok(json!({ "points": rows.len(), "max_rel_err": worst }))
}
