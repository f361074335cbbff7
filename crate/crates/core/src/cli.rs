//! Command-line front end.

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use thiserror::Error;

use crate::analysis::{
    bound_from_campaign, lc_systematic, run_campaign, sensitivity_sweep, AnalysisError, BoundOptions, RunRecord,
    SampleStats, SweepConfig,
};
use crate::config::{ConfigError, ExperimentConfig};
use crate::fitcore::{fit_interferogram, Detector, FitResult};
use crate::interferometer::{theta_bound, Estimate, ThetaBound};
use crate::io::{self, FormatError};
use crate::metaoptics::{
    index_spectrum_with_threshold, zero_crossings, PhaseSpectrum, SlabSpec, DEFAULT_AMBIGUITY_THRESHOLD,
    DEFAULT_THICKNESS_NM,
};
use crate::photonsim::{run_seed, simulate_run, Interferogram};

#[derive(Debug, Parser)]
#[command(
    name = "quatsagnac",
    version,
    about = "Simulate and analyse a test of optical phase commutativity"
)]
pub struct Cli {
    /// TOML experiment configuration; defaults are used when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Override the scan seed (simulate) or the master seed (campaign, sweep).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads; 0 uses every core.
    #[arg(long, global = true, default_value_t = 0)]
    pub jobs: usize,
    /// Output directory, overriding the configuration.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate one LC toggle and write the interferograms.
    Simulate(SimulateArgs),
    /// Fit interferogram CSV files.
    Fit(FitArgs),
    /// Run a campaign of LC toggles and derive the bound.
    Campaign(CampaignArgs),
    /// Sweep an injected non-commuting LC phase and report detection power.
    Sweep(SweepArgs),
    /// Convert a measured phase spectrum into an index spectrum.
    Index(IndexArgs),
    /// Derive the bound from saved runs or from a ratio and its sigma.
    Bound(BoundArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Also simulate the configurations without the metamaterial.
    #[arg(long)]
    pub lc_only: bool,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[arg(required = true)]
    pub files: Vec<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CampaignArgs {
    #[arg(long)]
    pub runs: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Comma-separated injected phase magnitudes in radians.
    #[arg(long, value_delimiter = ',')]
    pub epsilons: Option<Vec<f64>>,
    #[arg(long)]
    pub runs: Option<usize>,
}

#[derive(Debug, Args)]
pub struct IndexArgs {
    /// CSV with columns `wavelength_nm,phase_rad`.
    pub spectrum: PathBuf,
    #[arg(long, default_value_t = DEFAULT_THICKNESS_NM)]
    pub thickness_nm: f64,
    /// Largest unwrapped phase step accepted without a warning, in radians.
    #[arg(long, default_value_t = DEFAULT_AMBIGUITY_THRESHOLD)]
    pub ambiguity_threshold: f64,
}

#[derive(Debug, Args)]
pub struct BoundArgs {
    /// `runs.json` written by `campaign`.
    #[arg(long, conflicts_with_all = ["ratio", "sigma"], required_unless_present = "ratio")]
    pub runs: Option<PathBuf>,
    #[arg(long, requires = "sigma")]
    pub ratio: Option<f64>,
    #[arg(long, requires = "ratio")]
    pub sigma: Option<f64>,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Format {
        path: PathBuf,
        #[source]
        source: FormatError,
    },
    #[error("{0}")]
    SoftFit(String),
    #[error("internal error: {0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) | Self::Usage(_) => 2,
            Self::Io { .. } | Self::Format { .. } => 3,
            Self::SoftFit(_) => 4,
            Self::Internal(_) => 5,
        }
    }
}

impl From<AnalysisError> for CliError {
    fn from(e: AnalysisError) -> Self {
        match e {
            AnalysisError::TooFew { .. } => Self::SoftFit(e.to_string()),
            other => Self::Internal(other.to_string()),
        }
    }
}

/// Parse arguments, run, report errors on stderr and return the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn run(cli: &Cli) -> Result<(), CliError> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.scan.seed = seed;
        cfg.campaign.master_seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.output.dir = out.clone();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.jobs)
        .build()
        .map_err(|e| CliError::Internal(e.to_string()))?;
    pool.install(|| match &cli.command {
        Command::Simulate(a) => simulate(&cfg, a),
        Command::Fit(a) => fit(&cfg, a),
        Command::Campaign(a) => campaign(&mut cfg, a),
        Command::Sweep(a) => sweep(&mut cfg, a),
        Command::Index(a) => index(&cfg, a),
        Command::Bound(a) => bound(&cfg, a),
    })
}

fn out_dir(cfg: &ExperimentConfig) -> Result<&Path, CliError> {
    let dir = cfg.output.dir.as_path();
    fs::create_dir_all(dir).map_err(|source| CliError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    Ok(dir)
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path).map(BufWriter::new).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn open(path: &Path) -> Result<BufReader<File>, CliError> {
    File::open(path).map(BufReader::new).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write_with(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> Result<(), FormatError>) -> Result<(), CliError> {
    let mut w = create(path)?;
    let format = |source| CliError::Format {
        path: path.to_path_buf(),
        source,
    };
    f(&mut w).map_err(format)?;
    w.flush().map_err(|e| format(e.into()))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    write_with(path, |w| io::write_json(w, value))
}

fn simulate(cfg: &ExperimentConfig, args: &SimulateArgs) -> Result<(), CliError> {
    let c = cfg.configurations()?;
    let scan = cfg.scan_config();
    let dir = out_dir(cfg)?;
    let main = simulate_run(&c.nim_only, &c.both, &scan).map_err(ConfigError::from)?;
    let mut outputs = vec![("nim_only", &c.nim_only, main.lc_off), ("both", &c.both, main.lc_on)];
    if args.lc_only || cfg.campaign.lc_systematic {
        let lc = simulate_run(&c.none, &c.lc_only, &scan.with_seed(run_seed(scan.rng_seed, 1)))
            .map_err(ConfigError::from)?;
        outputs.push(("none", &c.none, lc.lc_off));
        outputs.push(("lc_only", &c.lc_only, lc.lc_on));
    }
    for (name, model, mut ig) in outputs {
        ig.label = name.to_string();
        let path = dir.join(format!("{name}.csv"));
        write_with(&path, |w| io::write_interferogram(w, &ig))?;
        println!(
            "{name}: analytic_visibility={} counts={} -> {}",
            io::format_float(model.analytic_visibility()),
            ig.total_counts(),
            path.display()
        );
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct DetectorFit {
    detector: Detector,
    #[serde(skip_serializing_if = "Option::is_none")]
    result: Option<FitResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

#[derive(Debug, Serialize)]
struct FileFit {
    path: String,
    n_samples: usize,
    total_counts: u64,
    fits: Vec<DetectorFit>,
}

fn fit(cfg: &ExperimentConfig, args: &FitArgs) -> Result<(), CliError> {
    let mut report = Vec::new();
    let mut soft = Vec::new();
    for path in &args.files {
        let label = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        let ig: Interferogram = io::read_interferogram(open(path)?, &label).map_err(|source| CliError::Format {
            path: path.clone(),
            source,
        })?;
        let fits = [Detector::D1, Detector::D2]
            .into_iter()
            .map(|detector| match fit_interferogram(&ig, detector) {
                Ok(r) => {
                    if !r.converged {
                        soft.push(format!("{}: {detector:?} fit did not converge", path.display()));
                    }
                    if r.low_signal {
                        log::warn!("{}: {detector:?} visibility is below the noise floor", path.display());
                    }
                    DetectorFit {
                        detector,
                        result: Some(r),
                        error: None,
                    }
                }
                Err(e) => {
                    soft.push(format!("{}: {detector:?} fit failed: {e}", path.display()));
                    DetectorFit {
                        detector,
                        result: None,
                        error: Some(e.to_string()),
                    }
                }
            })
            .collect();
        report.push(FileFit {
            path: path.display().to_string(),
            n_samples: ig.len(),
            total_counts: ig.total_counts(),
            fits,
        });
    }
    let out = out_dir(cfg)?.join("fit_report.json");
    write_json(&out, &report)?;
    for f in &report {
        for d in &f.fits {
            if let Some(r) = &d.result {
                println!(
                    "{} {:?}: V = {} +- {}",
                    f.path,
                    d.detector,
                    io::format_float(r.visibility.value),
                    io::format_float(r.visibility.sigma)
                );
            }
        }
    }
    if soft.is_empty() {
        Ok(())
    } else {
        Err(CliError::SoftFit(soft.join("; ")))
    }
}

fn campaign(cfg: &mut ExperimentConfig, args: &CampaignArgs) -> Result<(), CliError> {
    if let Some(n) = args.runs {
        cfg.campaign.n_runs = n;
    }
    if cfg.campaign.n_runs < 2 {
        return Err(CliError::Usage("a campaign needs at least 2 runs".into()));
    }
    let c = cfg.configurations()?;
    let scan = cfg.scan_config();
    let seed = cfg.campaign.master_seed;
    let n = cfg.campaign.n_runs;
    let binning = cfg.analysis.binning.binning()?;
    log::info!("running {n} runs with master seed {seed}");
    let records = run_campaign(&c.nim_only, &c.both, &scan, n, seed)?;
    let report = bound_from_campaign(&records, &BoundOptions { binning })?;
    let dir = out_dir(cfg)?;
    write_json(&dir.join("runs.json"), &records)?;
    write_json(&dir.join("bound_report.json"), &report)?;
    write_with(&dir.join("delta_v_hist.csv"), |w| {
        io::write_histogram(w, &report.delta_v_histogram)
    })?;
    write_with(&dir.join("gamma_ratio_hist.csv"), |w| {
        io::write_histogram(w, &report.gamma_ratio_histogram)
    })?;
    if cfg.campaign.lc_systematic {
        let lc_records = run_campaign(&c.none, &c.lc_only, &scan, n, run_seed(seed, usize::MAX))?;
        let stats: SampleStats = lc_systematic(&lc_records)?;
        write_json(&dir.join("lc_systematic.json"), &stats)?;
        println!(
            "lc-only delta V = {} +- {}",
            io::format_float(stats.mean),
            io::format_float(stats.stderr)
        );
    }
    print_bound_summary(
        report.gamma_ratio_mean,
        report.gamma_ratio_sigma,
        report.theta_central_deg,
        report.theta_conservative_deg,
    );
    println!(
        "delta V = {} +- {}, significance {:.2}, detected: {}",
        io::format_float(report.delta_v_mean),
        io::format_float(report.delta_v_run_stderr),
        report.significance,
        report.noncommutativity_detected
    );
    Ok(())
}

fn print_bound_summary(ratio: f64, sigma: f64, central: f64, conservative: f64) {
    println!(
        "gamma ratio = {} +- {}, theta central {central:.6} deg, conservative {conservative:.6} deg",
        io::format_float(ratio),
        io::format_float(sigma)
    );
}

fn sweep(cfg: &mut ExperimentConfig, args: &SweepArgs) -> Result<(), CliError> {
    if let Some(e) = &args.epsilons {
        cfg.sweep.epsilons = e.clone();
    }
    if let Some(n) = args.runs {
        cfg.sweep.n_runs = n;
    }
    cfg.validate()?;
    if cfg.sweep.n_runs < 2 {
        return Err(CliError::Usage("a sweep needs at least 2 runs per point".into()));
    }
    let config = SweepConfig {
        model: cfg.apparatus_model()?,
        lc_label: cfg.apparatus.lc_label.clone(),
        direction: cfg.sweep_direction(),
        scan: cfg.scan_config(),
        n_runs: cfg.sweep.n_runs,
        master_seed: cfg.campaign.master_seed,
    };
    let report = sensitivity_sweep(&cfg.sweep.epsilons, &config)?;
    let dir = out_dir(cfg)?;
    write_with(&dir.join("sensitivity.csv"), |w| io::write_sweep(w, &report))?;
    write_json(&dir.join("sensitivity.json"), &report)?;
    match report.min_detectable_epsilon {
        Some(e) => println!("smallest detectable epsilon on the grid: {}", io::format_float(e)),
        None => println!("no grid point reaches the detection threshold"),
    }
    Ok(())
}

fn index(cfg: &ExperimentConfig, args: &IndexArgs) -> Result<(), CliError> {
    let path = &args.spectrum;
    let format = |source| CliError::Format {
        path: path.clone(),
        source,
    };
    let points = io::read_phase_spectrum(open(path)?).map_err(format)?;
    let invalid = |e: crate::metaoptics::MetaOpticsError| CliError::Usage(format!("{}: {e}", path.display()));
    let spectrum = PhaseSpectrum::new(points).map_err(invalid)?;
    let slab = SlabSpec::new(args.thickness_nm).map_err(invalid)?;
    let index = index_spectrum_with_threshold(&spectrum, &slab, args.ambiguity_threshold).map_err(invalid)?;
    for p in index.iter().filter(|p| p.ambiguous) {
        log::warn!("phase unwrapping is ambiguous at {} nm", p.wavelength_nm);
    }
    let out = out_dir(cfg)?.join("index.csv");
    write_with(&out, |w| io::write_index_spectrum(w, &index))?;
    for z in zero_crossings(&index) {
        println!("index zero crossing at {z:.3} nm");
    }
    println!("{} points -> {}", index.len(), out.display());
    Ok(())
}

#[derive(Debug, Serialize)]
struct RatioBound {
    gamma_ratio: Estimate,
    theta: ThetaBound,
}

fn bound(cfg: &ExperimentConfig, args: &BoundArgs) -> Result<(), CliError> {
    let dir = out_dir(cfg)?;
    if let Some(path) = &args.runs {
        let records: Vec<RunRecord> = serde_json::from_reader(open(path)?).map_err(|e| CliError::Format {
            path: path.clone(),
            source: e.into(),
        })?;
        let binning = cfg.analysis.binning.binning()?;
        let report = bound_from_campaign(&records, &BoundOptions { binning })?;
        write_json(&dir.join("bound_report.json"), &report)?;
        print_bound_summary(
            report.gamma_ratio_mean,
            report.gamma_ratio_sigma,
            report.theta_central_deg,
            report.theta_conservative_deg,
        );
        return Ok(());
    }
    let (ratio, sigma) = match (args.ratio, args.sigma) {
        (Some(r), Some(s)) if r.is_finite() && s.is_finite() && s >= 0.0 => (r, s),
        (Some(_), Some(_)) => return Err(CliError::Usage("ratio must be finite and sigma non-negative".into())),
        _ => return Err(CliError::Usage("give --runs or both --ratio and --sigma".into())),
    };
    let gamma_ratio = Estimate::new(ratio, sigma);
    let theta = theta_bound(gamma_ratio);
    write_json(&dir.join("theta_bound.json"), &RatioBound { gamma_ratio, theta })?;
    print_bound_summary(ratio, sigma, theta.central_deg, theta.conservative_deg);
    Ok(())
}
