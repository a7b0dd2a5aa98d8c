//! The `mor` command line: one subcommand per pipeline stage, artifacts under
//! `<out>/<problem>/<stage>/`.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use nalgebra::DVector;

use crate::dynsys::{von_neumann_dt_bound, Trajectory};
use crate::error::{Error, Result};
use crate::experiments::{Probe, ProblemId, Setup};
use crate::io::artifacts::{load_json, to_json_bytes};
use crate::io::svg::{line_chart, Series};
use crate::io::table::{read_trajectory_csv, trajectory_table, vector_table, Cell};
use crate::io::{parse_config, CsvTable, DeimArtifact, Manifest, ModelArtifact, PodArtifact, RunConfig};
use crate::net::{evaluate_mse, train_drrnn, train_standard_rnn, Dataset, DrRnn, DrRnnHyper, LossRecord};
use crate::problems::two_phase::{fractional_flow, solve_pressure};
use crate::problems::sequential_implicit_run;
use crate::reduction::{assemble_snapshots, build_deim_operator, compute_pod_basis, deim_select, DeimOperator, PodBasis};
use crate::uq::kde::{kde_estimate, kde_l1_distance, padded_grid, silverman_bandwidth};
use crate::uq::{ensemble_mse, sample_parameters, EnsembleResult};

#[derive(Debug, Parser)]
#[command(name = "mor", version, about = "Reduced-order models and residual recurrent emulators")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Full-order ensemble over the configured parameter draws.
    FomRun(CommonArgs),
    /// POD basis from the full-order snapshots.
    PodBuild(CommonArgs),
    /// DEIM points from nonlinearity snapshots (two-phase problem).
    DeimBuild(CommonArgs),
    /// Reduced-model ensemble and its error table row.
    RomRun(CommonArgs),
    /// Train a DR-RNN (and optionally the baseline RNN).
    DrrnnTrain(TrainArgs),
    /// Roll a trained DR-RNN over the evaluation samples.
    DrrnnRun(CommonArgs),
    /// Density estimates of the probe values and L1 distances to the full model.
    UqReport(CommonArgs),
    /// Explicit-transport time-step bound versus the configured step.
    StabilityCheck(CommonArgs),
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, env = "MOR_THREADS")]
    pub threads: Option<usize>,
    #[arg(long)]
    pub rank: Option<usize>,
    #[arg(long)]
    pub deim_m: Option<usize>,
    #[arg(long)]
    pub layers: Option<usize>,
    #[arg(long)]
    pub dt_multiplier: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Also train the standard RNN baseline (ODE problems).
    #[arg(long)]
    pub baseline: bool,
}

/// Process exit code for an error.
pub fn exit_code(err: &Error) -> i32 {
    match err.root() {
        Error::Config(_) | Error::InvalidArgument { .. } => 2,
        Error::MissingArtifact { .. } => 4,
        e if e.is_numerical() => 3,
        _ => 1,
    }
}

impl CommonArgs {
    /// Parses the config and applies command-line overrides.
    pub fn load(&self) -> Result<RunConfig> {
        let mut cfg = parse_config(&self.config)?;
        if let Some(out) = &self.out {
            cfg.output_dir = out.clone();
        }
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(t) = self.threads {
            cfg.threads = t;
        }
        if let Some(r) = self.rank {
            cfg.reduction.rank = r;
        }
        if let Some(m) = self.deim_m {
            cfg.reduction.deim_m = m;
        }
        if let Some(k) = self.layers {
            cfg.model.layers = k;
        }
        if let Some(x) = self.dt_multiplier {
            cfg.model.dt_multiplier = x;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

pub fn run(cli: Cli) -> Result<()> {
    let (args, baseline) = match &cli.command {
        Command::DrrnnTrain(t) => (&t.common, t.baseline),
        Command::FomRun(a)
        | Command::PodBuild(a)
        | Command::DeimBuild(a)
        | Command::RomRun(a)
        | Command::DrrnnRun(a)
        | Command::UqReport(a)
        | Command::StabilityCheck(a) => (a, false),
    };
    let cfg = args.load()?;
    if cfg.threads > 0 {
        // Fails only if a pool already exists, which is harmless.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(cfg.threads).build_global();
    }
    match cli.command {
        Command::FomRun(_) => fom_run(&cfg),
        Command::PodBuild(_) => pod_build(&cfg),
        Command::DeimBuild(_) => deim_build(&cfg),
        Command::RomRun(_) => rom_run(&cfg),
        Command::DrrnnTrain(_) => drrnn_train(&cfg, baseline),
        Command::DrrnnRun(_) => drrnn_run(&cfg),
        Command::UqReport(_) => uq_report(&cfg),
        Command::StabilityCheck(_) => stability_check(&cfg),
    }
}

pub const FOM: &str = "fom";
pub const POD: &str = "pod";
pub const DEIM: &str = "deim";
pub const ROM: &str = "rom";
pub const DRRNN: &str = "drrnn";
pub const UQ: &str = "uq";
pub const STABILITY: &str = "stability";

fn trajectory_file(i: usize) -> String {
    format!("traj_{i:05}.csv")
}

fn probe(cfg: &RunConfig, setup: &Setup) -> Probe {
    setup.probe(cfg.uq.component, cfg.uq.x, cfg.uq.t)
}

fn samples_table(samples: &[Vec<f64>]) -> Result<CsvTable> {
    let dims = samples.first().map_or(0, Vec::len);
    let headers: Vec<String> = std::iter::once("sample_id".to_string())
        .chain((0..dims).map(|j| format!("param_{j}")))
        .collect();
    let mut t = CsvTable::new(headers)?;
    for (i, s) in samples.iter().enumerate() {
        t.push(std::iter::once(Cell::from(i)).chain(s.iter().map(|v| Cell::Num(*v))).collect())?;
    }
    Ok(t)
}

/// `sample_id, param.., value` for the successful runs.
fn probe_table(samples: &[Vec<f64>], values: &[(usize, f64)]) -> Result<CsvTable> {
    let dims = samples.first().map_or(0, Vec::len);
    let headers: Vec<String> = std::iter::once("sample_id".to_string())
        .chain((0..dims).map(|j| format!("param_{j}")))
        .chain(std::iter::once("value".to_string()))
        .collect();
    let mut t = CsvTable::new(headers)?;
    for &(i, v) in values {
        let row = std::iter::once(Cell::from(i))
            .chain(samples[i].iter().map(|p| Cell::Num(*p)))
            .chain(std::iter::once(Cell::Num(v)))
            .collect();
        t.push(row)?;
    }
    Ok(t)
}

fn failure_error(stage: &str, ens: &EnsembleResult) -> Result<()> {
    match ens.failures.first() {
        None => Ok(()),
        Some((i, msg)) => Err(Error::NonFinite(format!(
            "{stage}: {} of {} samples failed (first: sample {i}: {msg})",
            ens.failures.len(),
            ens.len()
        ))),
    }
}

fn write_failures(manifest: &mut Manifest, dir: &Path, ens: &EnsembleResult) -> Result<()> {
    if !ens.failures.is_empty() {
        manifest.write_output(dir, "failures.json", &to_json_bytes(&ens.failures)?)?;
    }
    Ok(())
}

pub fn fom_run(cfg: &RunConfig) -> Result<()> {
    let setup = cfg.setup()?;
    let samples = sample_parameters(&cfg.ensemble_spec())?;
    log::info!("{}: {} full-order runs", cfg.problem, samples.len());
    let ens = setup.fom_ensemble(&samples);
    let dir = cfg.stage_dir(FOM);
    let mut manifest = Manifest::new(FOM, cfg.problem.name(), cfg.seed);
    manifest
        .setting("dt", cfg.grid.dt)
        .setting("steps", cfg.grid.steps)
        .setting("count", samples.len());
    manifest.write_output(&dir, "samples.csv", samples_table(&samples)?.to_csv_string()?.as_bytes())?;
    for (i, traj) in ens.trajectories.iter().enumerate() {
        if let Some(t) = traj {
            manifest.write_output(&dir, &trajectory_file(i), trajectory_table(t).to_csv_string()?.as_bytes())?;
        }
    }
    let p = probe(cfg, &setup);
    manifest.setting("probe", &p.description);
    manifest.write_output(&dir, "probes.csv", probe_table(&samples, &p.values(&ens, 1))?.to_csv_string()?.as_bytes())?;
    write_failures(&mut manifest, &dir, &ens)?;
    manifest.save(&dir)?;
    println!(
        "fom-run: {} of {} runs succeeded; wrote {}",
        ens.successes(),
        ens.len(),
        dir.display()
    );
    failure_error("fom-run", &ens)
}

/// Samples and trajectories written by `fom-run`, in sample order.
pub fn load_fom(cfg: &RunConfig) -> Result<EnsembleResult> {
    let dir = cfg.stage_dir(FOM);
    let manifest = Manifest::load(&dir)?;
    let table = CsvTable::read(&dir.join("samples.csv"))?;
    let dims = table.headers.len() - 1;
    let samples: Vec<Vec<f64>> = (0..table.rows.len())
        .map(|i| {
            (0..dims)
                .map(|j| match &table.rows[i][j + 1] {
                    Cell::Num(v) => Ok(*v),
                    Cell::Text(s) => Err(Error::Format {
                        path: dir.join("samples.csv"),
                        reason: format!("row {i}: `{s}` is not a number"),
                    }),
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    let mut trajectories: Vec<Option<Trajectory>> = vec![None; samples.len()];
    for name in manifest.output_names() {
        if let Some(i) = name
            .strip_prefix("traj_")
            .and_then(|s| s.strip_suffix(".csv"))
            .and_then(|s| s.parse::<usize>().ok())
        {
            if i < samples.len() {
                trajectories[i] = Some(read_trajectory_csv(&dir.join(name))?);
            }
        }
    }
    let failures = trajectories
        .iter()
        .enumerate()
        .filter(|(_, t)| t.is_none())
        .map(|(i, _)| (i, "no full-order trajectory".to_string()))
        .collect();
    Ok(EnsembleResult {
        samples,
        trajectories,
        failures,
    })
}

fn require_pde(cfg: &RunConfig, stage: &str) -> Result<()> {
    if cfg.problem.ode_variant().is_some() {
        return Err(Error::Config(format!("{stage} applies to the PDE problems p4 and p5, not {}", cfg.problem)));
    }
    Ok(())
}

pub fn pod_build(cfg: &RunConfig) -> Result<()> {
    require_pde(cfg, "pod-build")?;
    let fom = load_fom(cfg)?;
    let snapshots = assemble_snapshots(&fom.ok_trajectories(), None)?;
    let keep = cfg
        .reduction
        .ranks
        .iter()
        .copied()
        .chain([cfg.reduction.rank])
        .max()
        .unwrap_or(cfg.reduction.rank)
        .min(snapshots.n());
    let basis = compute_pod_basis(&snapshots, keep)?;
    let dir = cfg.stage_dir(POD);
    let mut manifest = Manifest::new(POD, cfg.problem.name(), cfg.seed);
    manifest.add_input(&cfg.stage_dir(FOM).join(crate::io::MANIFEST_FILE))?;
    manifest.setting("snapshots", snapshots.len()).setting("rank", keep);
    manifest.write_output(&dir, "basis.json", &to_json_bytes(&PodArtifact::from_basis(&basis))?)?;
    let sv = DVector::from_vec(basis.singular_values.clone());
    manifest.write_output(&dir, "singular_values.csv", vector_table("sigma", &sv).to_csv_string()?.as_bytes())?;
    let chart = line_chart(
        "singular values",
        "index",
        &[Series {
            label: "sigma".into(),
            x: (0..sv.len()).map(|i| i as f64 + 1.0).collect(),
            y: sv.iter().copied().collect(),
        }],
        true,
    )?;
    manifest.write_output(&dir, "singular_values.svg", chart.as_bytes())?;
    manifest.save(&dir)?;
    println!(
        "pod-build: {} snapshots of dimension {}, kept {keep} modes (energy {:.12})",
        snapshots.len(),
        snapshots.n(),
        basis.energy_fraction()
    );
    Ok(())
}

fn load_basis(cfg: &RunConfig) -> Result<PodBasis> {
    let path = cfg.stage_dir(POD).join("basis.json");
    let art: PodArtifact = load_json(&path)?;
    let basis = art.to_basis()?;
    if basis.rank() < cfg.reduction.rank {
        return Err(Error::MissingArtifact {
            path,
            reason: format!(
                "holds {} modes but rank {} was requested; rerun pod-build with --rank {}",
                basis.rank(),
                cfg.reduction.rank,
                cfg.reduction.rank
            ),
        });
    }
    basis.truncate(cfg.reduction.rank)
}

pub fn deim_build(cfg: &RunConfig) -> Result<()> {
    if cfg.problem != ProblemId::P5 {
        return Err(Error::Config(format!(
            "deim-build needs a componentwise nonlinearity; {} has none",
            cfg.problem
        )));
    }
    let setup = cfg.setup()?;
    let fom = load_fom(cfg)?;
    // Validates that a basis exists before the expensive part.
    load_basis(cfg)?;
    let snapshots = setup.nonlinear_snapshots(&fom.ok_trajectories())?;
    let v = compute_pod_basis(&snapshots, cfg.reduction.deim_m)?;
    let indices = deim_select(&v.basis)?;
    let dir = cfg.stage_dir(DEIM);
    let mut manifest = Manifest::new(DEIM, cfg.problem.name(), cfg.seed);
    manifest.add_input(&cfg.stage_dir(FOM).join(crate::io::MANIFEST_FILE))?;
    manifest.setting("m", cfg.reduction.deim_m);
    let op = build_deim_operator(&v.basis, &indices, &load_basis(cfg)?)?;
    let art = DeimArtifact::from_operator(&op);
    manifest.write_output(&dir, "deim.json", &to_json_bytes(&art)?)?;
    manifest.save(&dir)?;
    println!(
        "deim-build: m = {}, points {:?}, cond(P^T V_m) = {:.3e}",
        op.m(),
        indices,
        op.condition
    );
    Ok(())
}

fn load_deim(cfg: &RunConfig, basis: &PodBasis) -> Result<Option<DeimOperator>> {
    if cfg.problem != ProblemId::P5 {
        return Ok(None);
    }
    let art: DeimArtifact = load_json(&cfg.stage_dir(DEIM).join("deim.json"))?;
    if art.indices.len() != cfg.reduction.deim_m {
        return Err(Error::MissingArtifact {
            path: cfg.stage_dir(DEIM).join("deim.json"),
            reason: format!(
                "built for m = {} but m = {} was requested; rerun deim-build",
                art.indices.len(),
                cfg.reduction.deim_m
            ),
        });
    }
    Ok(Some(art.to_operator(basis)?))
}

/// Adds or replaces the row keyed by `(method, rank_or_layers)`.
fn upsert_mse_row(path: &Path, method: &str, key: usize, train: f64, test: f64) -> Result<()> {
    let mut table = match CsvTable::read(path) {
        Ok(t) => t,
        Err(Error::MissingArtifact { .. }) => CsvTable::new(["method", "rank_or_layers", "mse_train", "mse_test"])?,
        Err(e) => return Err(e),
    };
    let key_s = key.to_string();
    table.rows.retain(|r| {
        !(matches!(&r[0], Cell::Text(m) if m == method)
            && match &r[1] {
                Cell::Num(v) => *v == key as f64,
                Cell::Text(s) => *s == key_s,
            })
    });
    table.push(vec![Cell::from(method), Cell::from(key), Cell::Num(train), Cell::Num(test)])?;
    table.write(path)
}

fn split_mse(cfg: &RunConfig, pred: &EnsembleResult, fom: &EnsembleResult) -> Result<(f64, f64)> {
    let spec = cfg.ensemble_spec();
    let part = |r: std::ops::Range<usize>| {
        if r.is_empty() {
            Ok(f64::NAN)
        } else {
            ensemble_mse(&pred.subset(r.clone()), &fom.subset(r))
        }
    };
    Ok((part(spec.train_range())?, part(spec.test_range())?))
}

pub fn rom_run(cfg: &RunConfig) -> Result<()> {
    require_pde(cfg, "rom-run")?;
    let setup = cfg.setup()?;
    let fom = load_fom(cfg)?;
    let basis = load_basis(cfg)?;
    let deim = load_deim(cfg, &basis)?;
    let method = if deim.is_some() { "pod-deim" } else { "pod" };
    let rom = setup.rom_ensemble(&fom.samples, &basis, deim.as_ref());
    let dir = cfg.stage_dir(ROM);
    let mut manifest = Manifest::load(&dir).unwrap_or_else(|_| Manifest::new(ROM, cfg.problem.name(), cfg.seed));
    manifest.add_input(&cfg.stage_dir(POD).join("basis.json"))?;
    let (train, test) = split_mse(cfg, &rom, &fom)?;
    let all = ensemble_mse(&rom, &fom)?;
    let p = probe(cfg, &setup);
    let name = format!("probes_{method}_r{}.csv", basis.rank());
    manifest.write_output(&dir, &name, probe_table(&fom.samples, &p.values(&rom, 1))?.to_csv_string()?.as_bytes())?;
    write_failures(&mut manifest, &dir, &rom)?;
    upsert_mse_row(&dir.join("mse.csv"), method, basis.rank(), train, test)?;
    manifest.outputs.retain(|(n, _)| n != "mse.csv");
    manifest.outputs.push(("mse.csv".into(), crate::io::sha256_file(&dir.join("mse.csv"))?));
    manifest.save(&dir)?;
    println!(
        "rom-run: {method} r = {}: mse {all:.6e} over {} samples (train {train:.6e}, test {test:.6e})",
        basis.rank(),
        rom.successes()
    );
    failure_error("rom-run", &rom)
}

fn model_file(cfg: &RunConfig) -> String {
    format!("model_k{}_x{}.json", cfg.model.layers, cfg.model.dt_multiplier)
}

fn history_table(history: &[LossRecord]) -> Result<CsvTable> {
    let mut t = CsvTable::new(["epoch", "train_mse", "test_mse"])?;
    for r in history {
        t.push(vec![
            Cell::from(r.epoch),
            Cell::Num(r.train_mse),
            Cell::Num(r.test_mse.unwrap_or(f64::NAN)),
        ])?;
    }
    Ok(t)
}

/// Training data and an unbound template for the configured problem.
fn training_data(cfg: &RunConfig, setup: &Setup) -> Result<(DrRnn, Dataset, Option<Dataset>)> {
    let fom = load_fom(cfg)?;
    let spec = cfg.ensemble_spec();
    let stride = cfg.model.dt_multiplier;
    let dt = cfg.grid.dt * stride as f64;
    let hyper = DrRnnHyper {
        zeta: cfg.model.zeta,
        gamma: cfg.model.gamma,
        ..DrRnnHyper::default()
    };
    if cfg.problem.ode_variant().is_some() {
        let train = Dataset::from_trajectories(&fom.subset(spec.train_range()).ok_trajectories(), stride)?;
        let test_trajs = fom.subset(spec.test_range()).ok_trajectories();
        let test = if test_trajs.is_empty() {
            None
        } else {
            Some(Dataset::from_trajectories(&test_trajs, stride)?)
        };
        let (system, _) = setup.system(&fom.samples[0])?;
        let template = DrRnn::new(Arc::new(system), cfg.model.layers, dt)?.with_hyper(hyper);
        return Ok((template, train, test));
    }
    if stride != 1 {
        return Err(Error::Config("model.dt_multiplier applies to the ODE problems only".into()));
    }
    let basis = load_basis(cfg)?;
    let deim = load_deim(cfg, &basis)?;
    let train_samples = &fom.samples[spec.train_range()];
    let train = setup.reduced_dataset(train_samples, &basis, deim.as_ref())?;
    let system = train
        .sequences
        .first()
        .and_then(|s| s.system.clone())
        .ok_or_else(|| Error::Config("ensemble.train must be at least 1".into()))?;
    let template = DrRnn::new(system, cfg.model.layers, dt)?.with_hyper(hyper);
    Ok((template, train, None))
}

pub fn drrnn_train(cfg: &RunConfig, baseline: bool) -> Result<()> {
    let setup = cfg.setup()?;
    let (template, train, test) = training_data(cfg, &setup)?;
    let tcfg = cfg.training_config();
    let (model, history) = train_drrnn(&template, &train, test.as_ref(), &tcfg)?;
    let dir = cfg.stage_dir(DRRNN);
    let mut manifest = Manifest::load(&dir).unwrap_or_else(|_| Manifest::new(DRRNN, cfg.problem.name(), cfg.seed));
    manifest.add_input(&cfg.stage_dir(FOM).join(crate::io::MANIFEST_FILE))?;
    let name = model_file(cfg);
    manifest.write_output(&dir, &name, &to_json_bytes(&ModelArtifact::from_drrnn(&model))?)?;
    let hist = name.replace("model_", "history_").replace(".json", ".csv");
    manifest.write_output(&dir, &hist, history_table(&history)?.to_csv_string()?.as_bytes())?;
    let last = history.last();
    println!(
        "drrnn-train: K = {}, dt = {}, {} parameters, final train mse {:.6e}{}",
        cfg.model.layers,
        model.dt,
        model.count_parameters(),
        last.map_or(f64::NAN, |r| r.train_mse),
        last.and_then(|r| r.test_mse).map_or(String::new(), |t| format!(", test mse {t:.6e}"))
    );
    if baseline {
        if cfg.problem.ode_variant().is_none() {
            return Err(Error::Config("--baseline applies to the ODE problems only".into()));
        }
        let (rnn, history) = train_standard_rnn(cfg.model.hidden, &train, test.as_ref(), &tcfg)?;
        let name = format!("model_rnn_x{}.json", cfg.model.dt_multiplier);
        manifest.write_output(&dir, &name, &to_json_bytes(&ModelArtifact::from_rnn(&rnn))?)?;
        let hist = name.replace("model_", "history_").replace(".json", ".csv");
        manifest.write_output(&dir, &hist, history_table(&history)?.to_csv_string()?.as_bytes())?;
        if let Some(t) = &test {
            println!("drrnn-train: baseline RNN test mse {:.6e}", evaluate_mse(&rnn, t)?);
        }
    }
    manifest.save(&dir)?;
    Ok(())
}

pub fn drrnn_run(cfg: &RunConfig) -> Result<()> {
    let setup = cfg.setup()?;
    let fom = load_fom(cfg)?;
    let dir = cfg.stage_dir(DRRNN);
    let art: ModelArtifact = load_json(&dir.join(model_file(cfg)))?;
    let stride = cfg.model.dt_multiplier;
    let (system, _) = setup.system(&fom.samples[0])?;
    let (pred, reference) = if cfg.problem.ode_variant().is_some() {
        let model = art.to_drrnn(Arc::new(system))?;
        let pred = setup.drrnn_ensemble(&model, &fom.samples, stride)?;
        let reference = EnsembleResult {
            trajectories: fom
                .trajectories
                .iter()
                .map(|t| t.as_ref().map(|t| t.subsample(stride)).transpose())
                .collect::<Result<_>>()?,
            ..fom.clone()
        };
        (pred, reference)
    } else {
        let basis = load_basis(cfg)?;
        let deim = load_deim(cfg, &basis)?;
        let rom = setup.reduced_system(&fom.samples[0], &basis, deim.as_ref())?;
        let model = art.to_drrnn(Arc::new(rom.system))?;
        (setup.drrnn_rom_ensemble(&model, &fom.samples, &basis, deim.as_ref()), fom.clone())
    };
    let (train, test) = split_mse(cfg, &pred, &reference)?;
    let mut manifest = Manifest::load(&dir)?;
    let p = probe(cfg, &setup);
    let tag = format!("k{}_x{stride}", cfg.model.layers);
    manifest.write_output(
        &dir,
        &format!("probes_dr-rnn_{tag}.csv"),
        probe_table(&fom.samples, &p.values(&pred, stride))?.to_csv_string()?.as_bytes(),
    )?;
    write_failures(&mut manifest, &dir, &pred)?;
    let method = if stride == 1 { "dr-rnn".to_string() } else { format!("dr-rnn-x{stride}") };
    upsert_mse_row(&dir.join("mse.csv"), &method, cfg.model.layers, train, test)?;
    manifest.outputs.retain(|(n, _)| n != "mse.csv");
    manifest.outputs.push(("mse.csv".into(), crate::io::sha256_file(&dir.join("mse.csv"))?));
    manifest.save(&dir)?;
    println!(
        "drrnn-run: K = {}, dt x{stride}: {} of {} rollouts finite; mse train {train:.6e}, test {test:.6e}",
        cfg.model.layers,
        pred.successes(),
        pred.len()
    );
    failure_error("drrnn-run", &pred)
}

/// Probe values of every `probes*.csv` in a stage directory, by method label.
fn collect_probes(dir: &Path, stage: &str) -> Result<Vec<(String, Vec<f64>)>> {
    let Ok(manifest) = Manifest::load(dir) else {
        return Ok(Vec::new());
    };
    let mut out = Vec::new();
    for name in manifest.output_names() {
        if let Some(label) = name.strip_prefix("probes").and_then(|s| s.strip_suffix(".csv")) {
            let label = label.trim_start_matches('_');
            let label = if label.is_empty() { stage.to_string() } else { label.to_string() };
            out.push((label, CsvTable::read(&dir.join(name))?.numbers("value")?));
        }
    }
    Ok(out)
}

pub fn uq_report(cfg: &RunConfig) -> Result<()> {
    let setup = cfg.setup()?;
    let reference = collect_probes(&cfg.stage_dir(FOM), FOM)?;
    let Some((_, fom_values)) = reference.into_iter().next() else {
        return Err(Error::MissingArtifact {
            path: cfg.stage_dir(FOM).join("probes.csv"),
            reason: "run fom-run first".into(),
        });
    };
    let mut others = collect_probes(&cfg.stage_dir(ROM), ROM)?;
    others.extend(collect_probes(&cfg.stage_dir(DRRNN), DRRNN)?);

    let bandwidth = silverman_bandwidth(&fom_values)?;
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for v in fom_values.iter().chain(others.iter().flat_map(|(_, v)| v.iter())) {
        lo = lo.min(*v);
        hi = hi.max(*v);
    }
    let grid = padded_grid(lo, hi, bandwidth, cfg.uq.kde_points);
    let fom_kde = kde_estimate(&fom_values, Some(&grid), None)?;

    let headers: Vec<String> = ["x".to_string(), "fom".to_string()]
        .into_iter()
        .chain(others.iter().map(|(l, _)| l.clone()))
        .collect();
    let mut curves = CsvTable::new(headers)?;
    let mut distances = CsvTable::new(["method", "samples", "l1_to_fom"])?;
    let mut kdes = Vec::new();
    for (label, values) in &others {
        let kde = kde_estimate(values, Some(&grid), None)?;
        let d = kde_l1_distance(&kde, &fom_kde)?;
        distances.push(vec![Cell::from(label.as_str()), Cell::from(values.len()), Cell::Num(d)])?;
        println!("uq-report: {label}: L1 distance to full-order density {d:.6}");
        kdes.push(kde);
    }
    for (i, x) in grid.iter().enumerate() {
        let row = [Cell::Num(*x), Cell::Num(fom_kde.density[i])]
            .into_iter()
            .chain(kdes.iter().map(|k| Cell::Num(k.density[i])))
            .collect();
        curves.push(row)?;
    }
    let dir = cfg.stage_dir(UQ);
    let mut manifest = Manifest::new(UQ, cfg.problem.name(), cfg.seed);
    let p = probe(cfg, &setup);
    manifest.setting("probe", &p.description).setting("bandwidth_rule", "silverman");
    manifest.write_output(&dir, "kde.csv", curves.to_csv_string()?.as_bytes())?;
    manifest.write_output(&dir, "l1.csv", distances.to_csv_string()?.as_bytes())?;
    let series: Vec<Series> = std::iter::once(("fom".to_string(), &fom_kde))
        .chain(others.iter().map(|(l, _)| l.clone()).zip(kdes.iter()))
        .map(|(label, k)| Series {
            label,
            x: grid.clone(),
            y: k.density.clone(),
        })
        .collect();
    manifest.write_output(&dir, "kde.svg", line_chart(&p.description, "value", &series, false)?.as_bytes())?;
    manifest.save(&dir)?;
    println!("uq-report: probe {}; wrote {}", p.description, dir.display());
    Ok(())
}

pub fn stability_check(cfg: &RunConfig) -> Result<()> {
    if cfg.problem != ProblemId::P5 {
        return Err(Error::Config(format!(
            "stability-check applies to the transport problem p5, not {}",
            cfg.problem
        )));
    }
    let spec = cfg.two_phase_spec();
    let s0 = crate::problems::two_phase::initial_saturation(&spec);
    let pressure = solve_pressure(s0.as_slice(), &spec)?;
    let bound = von_neumann_dt_bound(
        spec.porosity,
        spec.dx(),
        &pressure.velocity,
        |s| fractional_flow(s, &spec).1,
        spec.saturation_bounds(),
    )?;
    let dt = cfg.grid.dt;
    println!("von Neumann dt bound: {bound:.6e}");
    println!("configured dt: {dt:.6e}");
    println!(
        "explicit stepping at the configured dt is {}",
        if dt <= bound { "stable" } else { "unstable" }
    );
    let run = sequential_implicit_run(&spec, &cfg.grid()?, &cfg.newton, cfg.two_phase.pressure_update_every);
    let converged = run.is_ok();
    println!(
        "implicit run at porosity {} and dt {dt}: {}",
        spec.porosity,
        if converged { "converged" } else { "failed" }
    );
    let dir = cfg.stage_dir(STABILITY);
    let mut manifest = Manifest::new(STABILITY, cfg.problem.name(), cfg.seed);
    let report = serde_json::json!({
        "dt_bound": bound,
        "dt": dt,
        "explicit_stable": dt <= bound,
        "porosity": spec.porosity,
        "max_velocity": pressure.velocity.iter().fold(0.0_f64, |m, v| m.max(v.abs())),
        "implicit_converged": converged,
    });
    manifest.write_output(&dir, "stability.json", serde_json::to_string_pretty(&report)?.as_bytes())?;
    manifest.save(&dir)?;
    run.map(|_| ())
}
