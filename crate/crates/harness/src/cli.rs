//! Command-line interface: `run`, `sim`, `stability` and `sweep`.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use mass::{mcr, predict_classes, run_mass};

use crate::config::{ConfigFile, DataSource, ExperimentSpec};
use crate::error::{HarnessError, Result};
use crate::experiment::{load_data, mass_config, method_seed, run_experiment, Prepared};
use crate::method::{split_methods, MethodKind};
use crate::output::{format_table, write_file, write_outputs};
use crate::stability::{stability_metric, StabilityReport};

#[derive(Debug, Parser)]
#[command(name = "mass-harness", version, about = "Replicated MASS simulation experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run an experiment grid and write results, traces and plots.
    Run(Common),
    /// Write simulated datasets as CSV files.
    Sim(Common),
    /// Repeat one search many times on one dataset and report agreement.
    Stability(Common),
    /// Sweep the target dimension of the baselines.
    Sweep(Common),
}

#[derive(Debug, Clone, Default, Args)]
pub struct Common {
    /// TOML experiment manifest; flags override its keys.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// I, I<lambda>, II1, II2, III, IV or V.
    #[arg(long)]
    pub study: Option<String>,
    #[arg(long)]
    pub reps: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads (default: available parallelism).
    #[arg(long)]
    pub workers: Option<usize>,
    /// Comma-separated methods, e.g. `FD,Lars(sweep),SIS-MASS,MFSS(xi=0.3,lambda=5)`.
    #[arg(long = "method")]
    pub methods: Option<String>,
    #[arg(long)]
    pub p: Option<usize>,
    #[arg(long)]
    pub iters: Option<usize>,
    /// Default curvature budget (spline search).
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Default MFSS sparsity.
    #[arg(long)]
    pub xi: Option<f64>,
    /// Preliminary reduction: none, pca, sis or pca_sis.
    #[arg(long)]
    pub reduce: Option<String>,
    /// Intermediate dimension for the preliminary reduction.
    #[arg(long)]
    pub m: Option<usize>,
}

/// Loads the manifest (if any) and applies flag overrides.
pub fn merged_config(c: &Common) -> Result<ConfigFile> {
    let mut f = match &c.config {
        Some(path) => ConfigFile::load(path)?,
        None => ConfigFile::default(),
    };
    if c.study.is_some() {
        f.study = c.study.clone();
        // A study on the command line replaces file-based data.
        f.data.train_csv = None;
        f.data.test_csv = None;
    }
    macro_rules! set {
        ($dst:expr, $src:expr) => {
            if let Some(v) = $src.clone() {
                $dst = Some(v);
            }
        };
    }
    set!(f.reps, c.reps);
    set!(f.seed, c.seed);
    set!(f.out, c.out);
    set!(f.workers, c.workers);
    set!(f.mass.p, c.p);
    set!(f.mass.iters, c.iters);
    set!(f.mass.lambda, c.lambda);
    set!(f.mass.xi, c.xi);
    set!(f.reduce.kind, c.reduce);
    set!(f.reduce.m, c.m);
    if let Some(list) = &c.methods {
        f.methods = Some(split_methods(list));
    }
    Ok(f)
}

pub fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run(c) => cmd_run(&c, false),
        Command::Sweep(c) => cmd_run(&c, true),
        Command::Sim(c) => cmd_sim(&c),
        Command::Stability(c) => cmd_stability(&c),
    }
}

fn out_dir(spec: &ExperimentSpec, default: &str) -> PathBuf {
    spec.out.clone().unwrap_or_else(|| PathBuf::from(default))
}

fn cmd_run(c: &Common, sweep: bool) -> Result<()> {
    let mut file = merged_config(c)?;
    if sweep {
        let p_max = c.p.or(file.data.p_max);
        file.data.p_max = p_max;
        let base = file
            .methods
            .take()
            .unwrap_or_else(|| vec!["Lars".into(), "PCA".into(), "SIS".into()]);
        let mut methods = Vec::new();
        for m in base.iter().flat_map(|s| split_methods(s)) {
            let spec: crate::method::MethodSpec = m.parse()?;
            if spec.kind.is_sweepable() && !spec.sweep {
                let mut swept = spec.clone();
                swept.p = None;
                swept.sweep = true;
                methods.push(swept.label());
            } else {
                methods.push(m);
            }
        }
        file.methods = Some(methods);
        file.mass.p = file.mass.p.filter(|_| c.p.is_none());
    }
    let spec = ExperimentSpec::resolve(file)?;
    let output = run_experiment(&spec)?;
    let dir = out_dir(&spec, "results");
    write_outputs(&output, &dir, spec.plots)?;
    print!("{}", format_table(&output.table, output.bayes));
    for f in &output.failures {
        eprintln!("NA: {} replication {}: {}", f.method, f.replication, f.reason);
    }
    println!("wrote {}", dir.display());
    Ok(())
}

fn cmd_sim(c: &Common) -> Result<()> {
    let spec = ExperimentSpec::resolve(merged_config(c)?)?;
    let DataSource::Study { study, .. } = &spec.source else {
        return Err(HarnessError::Config("sim needs --study".into()));
    };
    let dir = out_dir(&spec, "data");
    for rep in 0..spec.reps {
        let data = load_data(&spec.source, spec.seed, rep)?;
        let stem = format!("{}_rep{rep}", study.tag());
        data.write_csv(&dir, &stem).map_err(|e| HarnessError::io(&dir, e))?;
        println!("wrote {}", dir.join(format!("{stem}_{{train,test}}.csv")).display());
    }
    Ok(())
}

/// Repeated searches on replication 0 of the experiment's data source.
#[derive(Debug, Clone)]
pub struct StabilityOutcome {
    pub report: StabilityReport,
    pub mcr: Vec<f64>,
    pub seeds: Vec<u64>,
}

impl StabilityOutcome {
    pub fn mcr_mean_se(&self) -> (f64, f64) {
        let n = self.mcr.len() as f64;
        let m = self.mcr.iter().sum::<f64>() / n;
        let var = self.mcr.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
        (m, (var / n).sqrt())
    }
}

/// Runs the experiment's first search method `runs` times with different
/// seeds on one fixed train/test pair.
pub fn run_stability(spec: &ExperimentSpec, runs: usize) -> Result<StabilityOutcome> {
    let method = spec
        .methods
        .iter()
        .find(|m| m.kind.is_search())
        .cloned()
        .unwrap_or_else(|| crate::method::MethodSpec::new(MethodKind::Mass));
    let data = load_data(&spec.source, spec.seed, 0)?;
    let prep = Prepared::new(&data, method.reduction.unwrap_or(spec.reduction), spec.m)?;
    let label = method.label();
    let seeds: Vec<u64> = (0..runs).map(|r| method_seed(spec.seed, &label, r)).collect();
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(w) = spec.workers {
        builder = builder.num_threads(w);
    }
    let pool = builder
        .build()
        .map_err(|e| HarnessError::Config(format!("cannot start worker pool: {e}")))?;
    let fits: Vec<Result<(f64, ndarray::Array2<f64>)>> = pool.install(|| {
        seeds
            .par_iter()
            .map(|&seed| {
                let cfg = mass_config(&method, &spec.mass, seed);
                let res = run_mass(&prep.x_train, &prep.y_train, &cfg, None)?;
                let z = res.directions.transform(prep.x_test.view())?;
                let rate = mcr(&predict_classes(&res.model, z.view())?, &prep.y_test)?;
                Ok((rate, z))
            })
            .collect()
    });
    let mut mcrs = Vec::with_capacity(runs);
    let mut zs = Vec::with_capacity(runs);
    for f in fits {
        let (m, z) = f?;
        mcrs.push(m);
        zs.push(z);
    }
    Ok(StabilityOutcome {
        report: stability_metric(&zs)?,
        mcr: mcrs,
        seeds,
    })
}

fn cmd_stability(c: &Common) -> Result<()> {
    let mut file = merged_config(c)?;
    if file.methods.is_none() {
        file.methods = Some(vec!["MASS".into()]);
    }
    let runs = file.reps.unwrap_or(100);
    file.reps = Some(runs);
    let spec = ExperimentSpec::resolve(file)?;
    let outcome = run_stability(&spec, runs)?;
    let (m, se) = outcome.mcr_mean_se();
    let r = &outcome.report;
    println!("runs: {runs}");
    println!("mean |rho_PC1|: {:.4} ({} pairs, {} skipped)", r.mean_abs_rho, r.pairs, r.skipped_pairs);
    println!("PC1 variance share: {:.4}", r.pc1_share);
    println!("test MCR: {m:.4} (se {se:.4})");
    let dir = out_dir(&spec, "stability");
    std::fs::create_dir_all(&dir).map_err(|e| HarnessError::io(&dir, e))?;
    let mut text = String::from("run,seed,test_mcr\n");
    for (i, (seed, v)) in outcome.seeds.iter().zip(&outcome.mcr).enumerate() {
        text.push_str(&format!("{i},{seed},{v}\n"));
    }
    write_file(&dir.join("stability_runs.csv"), &text)?;
    let shares: Vec<String> = r.component_share.iter().map(|v| v.to_string()).collect();
    let summary = format!(
        "mean_abs_rho,pairs,skipped_pairs,pc1_share,mcr_mean,mcr_se,component_share\n{},{},{},{},{m},{se},{}\n",
        r.mean_abs_rho,
        r.pairs,
        r.skipped_pairs,
        r.pc1_share,
        shares.join(";")
    );
    write_file(&dir.join("stability.csv"), &summary)?;
    println!("wrote {}", dir.display());
    Ok(())
}

/// Parses arguments the way the binary does; used by tests.
pub fn parse_from<I, T>(args: I) -> std::result::Result<Cli, clap::Error>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    Cli::try_parse_from(args)
}

pub fn default_config_path() -> &'static Path {
    Path::new("mass.toml")
}
