//! `fmcw-mend`: simulate, mitigate and evaluate interference-contaminated
//! FMCW beat signals.
//!
//! Exit codes: 0 success, 2 configuration or usage error, 3 data error,
//! 4 estimator failure.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fmcw_mend::config::{parse_gap_arg, Config};
use fmcw_mend::mitigate::{self, MpConfig, DEFAULT_DETECT_K_MAD, DEFAULT_DETECT_WINDOW};
use fmcw_mend::sigmodel::{ComplexSeries, GapSpec, Method, MitigationReport, RadarParams};
use fmcw_mend::spectra::{self, CpiConfig, RdMap, Window};
use fmcw_mend::sweepfile::{self, SweepFile};
use fmcw_mend::{metrics, synth, Error};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Parser)]
#[command(
    name = "fmcw-mend",
    version,
    about = "FMCW interference mitigation by gapped matrix-pencil reconstruction"
)]
struct Cli {
    /// Worker threads (default: FMCW_MEND_WORKERS, else all cores).
    #[arg(long, global = true, env = "FMCW_MEND_WORKERS")]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize contaminated and reference sweeps from a scenario config.
    Simulate {
        config: PathBuf,
        #[arg(short, long, default_value = ".")]
        out_dir: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Mitigate interference in every sweep of a sweep file.
    Mitigate {
        input: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        #[command(flatten)]
        est: EstimatorArgs,
        #[command(flatten)]
        gap: GapArgs,
        /// Per-sweep report (JSON).
        #[arg(long)]
        report: Option<PathBuf>,
        /// Range profiles of the cleaned sweeps (CSV).
        #[arg(long)]
        profile_csv: Option<PathBuf>,
        #[arg(long)]
        nfft: Option<usize>,
        #[arg(long, default_value = "rect")]
        window: Window,
    },
    /// Monte Carlo gap/SNR study; writes the statistics table as CSV.
    Study {
        config: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Range-Doppler maps of a CPI before and after per-Doppler-bin mitigation.
    ///
    /// Writes rd_before.csv and rd_after.csv (dB), rd_diff.csv (linear
    /// power of the mitigated map minus that of a zeroed one) and
    /// rd_reports.json.
    Rd {
        input: PathBuf,
        #[arg(short, long, default_value = ".")]
        out_dir: PathBuf,
        #[command(flatten)]
        est: EstimatorArgs,
        #[command(flatten)]
        gap: GapArgs,
        /// Skip mitigation; the "after" map equals the "before" map.
        #[arg(long)]
        no_mitigation: bool,
        #[arg(long)]
        nfft: Option<usize>,
        #[arg(long, default_value = "rect")]
        window: Window,
    },
}

#[derive(Args, Clone)]
struct EstimatorArgs {
    #[arg(long, default_value = "mp")]
    method: Method,
    #[arg(long)]
    order: Option<usize>,
    #[arg(long = "L")]
    l: Option<usize>,
    #[arg(long)]
    sv_threshold: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long)]
    clamp_delta: Option<f64>,
    #[arg(long)]
    max_order: Option<usize>,
}

impl EstimatorArgs {
    fn mp(&self, base: MpConfig) -> MpConfig {
        MpConfig {
            order: self.order.or(base.order),
            l: self.l.or(base.l),
            sv_threshold: self.sv_threshold.unwrap_or(base.sv_threshold),
            max_iter: self.max_iter.unwrap_or(base.max_iter),
            clamp_delta: self.clamp_delta.unwrap_or(base.clamp_delta),
            max_order: self.max_order.or(base.max_order),
            eps_rel_tol: base.eps_rel_tol,
        }
    }
}

#[derive(Args, Clone)]
struct GapArgs {
    /// Gap as inclusive sample indices `n1:n2`.
    #[arg(long, conflicts_with_all = ["detect", "gap_file"])]
    gap: Option<String>,
    /// Gap sidecar JSON (default: `<input>.gap.json` when present).
    #[arg(long, conflicts_with = "detect")]
    gap_file: Option<PathBuf>,
    /// Locate the gap with the energy detector.
    #[arg(long)]
    detect: bool,
    #[arg(long, default_value_t = DEFAULT_DETECT_WINDOW)]
    detect_window: usize,
    #[arg(long, default_value_t = DEFAULT_DETECT_K_MAD)]
    detect_k_mad: f64,
}

/// Gap sidecar written next to simulated sweep files.
#[derive(Debug, Serialize, Deserialize)]
struct GapSidecar {
    n1: usize,
    n2: usize,
    #[serde(default)]
    n_samples: Option<usize>,
}

#[derive(Serialize)]
struct SweepReport {
    sweep: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    report: Option<MitigationReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

#[derive(Debug)]
enum CliError {
    Config(String),
    Data(String),
    Estimator(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
            CliError::Estimator(_) => 4,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Data(m) => write!(f, "data error: {m}"),
            CliError::Estimator(m) => write!(f, "estimator failure: {m}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let msg = e.to_string();
        match e {
            Error::ConfigSyntax { .. }
            | Error::ConfigField { .. }
            | Error::ConfigMissing { .. }
            | Error::InvalidParameter { .. }
            | Error::TargetOutOfRange { .. } => CliError::Config(msg),
            Error::RankDeficient { .. }
            | Error::IllConditioned { .. }
            | Error::ZeroMatrix
            | Error::InsufficientData(_) => CliError::Estimator(msg),
            _ => CliError::Data(msg),
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Data(format!("{}: {e}", path.display()))
}

fn write_file(path: &Path, contents: &[u8]) -> CliResult<()> {
    std::fs::write(path, contents).map_err(|e| io_err(path, e))
}

fn load_config(path: &Path) -> CliResult<Config> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    Ok(Config::parse(&text)?)
}

fn sidecar_path(input: &Path) -> PathBuf {
    input.with_extension("gap.json")
}

fn write_sidecar(path: &Path, gap: GapSpec, n_samples: usize) -> CliResult<()> {
    let json = serde_json::to_string_pretty(&GapSidecar {
        n1: gap.n1,
        n2: gap.n2,
        n_samples: Some(n_samples),
    })
    .expect("plain struct serializes");
    write_file(path, json.as_bytes())
}

fn read_sidecar(path: &Path) -> CliResult<GapSpec> {
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let s: GapSidecar = serde_json::from_str(&text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    Ok(GapSpec::new(s.n1, s.n2))
}

enum GapSource {
    Fixed(GapSpec),
    Detect { win: usize, k_mad: f64 },
}

fn gap_source(args: &GapArgs, input: &Path) -> CliResult<GapSource> {
    if args.detect {
        return Ok(GapSource::Detect {
            win: args.detect_window,
            k_mad: args.detect_k_mad,
        });
    }
    if let Some(g) = &args.gap {
        return Ok(GapSource::Fixed(parse_gap_arg(g)?));
    }
    let path = args.gap_file.clone().unwrap_or_else(|| sidecar_path(input));
    if !path.exists() {
        return Err(CliError::Config(format!(
            "no gap given: pass --gap n1:n2, --gap-file, or --detect ({} not found)",
            path.display()
        )));
    }
    Ok(GapSource::Fixed(read_sidecar(&path)?))
}

fn cmd_simulate(config: &Path, out_dir: &Path, seed: Option<u64>) -> CliResult<()> {
    let cfg = load_config(config)?;
    let mut scenario = cfg.scenario()?;
    if let Some(s) = seed {
        scenario.seed = s;
    }
    std::fs::create_dir_all(out_dir).map_err(|e| io_err(out_dir, e))?;
    let radar = scenario.radar;
    let (contaminated, reference, gap) = match cfg.cpi()? {
        Some((n_sweeps, interval)) => {
            let cpi = synth::build_cpi(&scenario, n_sweeps, interval.unwrap_or(radar.sweep_time))?;
            (cpi.contaminated, cpi.reference, cpi.truth_gap)
        }
        None => {
            let sc = synth::build_scenario(&scenario)?;
            if sc.ghost_target {
                eprintln!("warning: interferer shares the victim chirp rate and appears as a ghost target");
            }
            (vec![sc.contaminated], vec![sc.reference], sc.truth_gap)
        }
    };
    let c_path = out_dir.join("contaminated.fmcw");
    sweepfile::write(&c_path, &SweepFile::new(&radar, contaminated)?)?;
    sweepfile::write(&out_dir.join("reference.fmcw"), &SweepFile::new(&radar, reference)?)?;
    write_sidecar(&sidecar_path(&c_path), gap, radar.n_samples)?;
    eprintln!("wrote {} (gap {}:{})", c_path.display(), gap.n1, gap.n2);
    Ok(())
}

fn sweep_gap(source: &GapSource, sweep: &ComplexSeries) -> fmcw_mend::Result<GapSpec> {
    match source {
        GapSource::Fixed(g) => Ok(*g),
        GapSource::Detect { win, k_mad } => mitigate::detect_interference(sweep, *win, *k_mad),
    }
}

fn profile_csv(sweeps: &[ComplexSeries], radar: &RadarParams, window: Window, nfft: usize) -> CliResult<String> {
    let profiles = sweeps
        .iter()
        .map(|s| spectra::range_profile(s, radar, window, nfft))
        .collect::<fmcw_mend::Result<Vec<_>>>()?;
    let mut out = String::from("range_m");
    for i in 0..profiles.len() {
        let _ = write!(out, ",sweep{i}_db");
    }
    out.push('\n');
    for b in 0..nfft {
        let _ = write!(out, "{}", profiles[0].range_m[b]);
        for p in &profiles {
            let _ = write!(out, ",{}", spectra::to_db(p.spectrum[b].norm()));
        }
        out.push('\n');
    }
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
fn cmd_mitigate(
    input: &Path,
    output: &Path,
    est: &EstimatorArgs,
    gap_args: &GapArgs,
    report: Option<&Path>,
    profile: Option<&Path>,
    nfft: Option<usize>,
    window: Window,
) -> CliResult<()> {
    let file = sweepfile::read(input)?;
    let radar = file.header.radar()?;
    let source = gap_source(gap_args, input)?;
    let cfg = est.mp(MpConfig::default());
    let results: Vec<(ComplexSeries, SweepReport)> = file
        .sweeps
        .par_iter()
        .enumerate()
        .map(|(i, s)| {
            let outcome = sweep_gap(&source, s).and_then(|gap| mitigate::mitigate(s, gap, est.method, &cfg));
            match outcome {
                Ok((clean, rep)) => (
                    clean,
                    SweepReport {
                        sweep: i,
                        report: Some(rep),
                        error: None,
                    },
                ),
                Err(e) => (
                    s.clone(),
                    SweepReport {
                        sweep: i,
                        report: None,
                        error: Some(e.to_string()),
                    },
                ),
            }
        })
        .collect();
    let failures: Vec<&str> = results.iter().filter_map(|r| r.1.error.as_deref()).collect();
    for r in &results {
        if let Some(e) = &r.1.error {
            eprintln!("sweep {}: {e}", r.1.sweep);
        }
    }
    if !results.is_empty() && failures.len() == results.len() {
        let first = failures[0];
        let e = if first == Error::NoInterferenceFound.to_string() || first == Error::SweepUnusable.to_string() {
            CliError::Data(first.to_string())
        } else {
            CliError::Estimator(format!("all {} sweeps failed; first: {first}", results.len()))
        };
        return Err(e);
    }
    let (cleaned, reports): (Vec<ComplexSeries>, Vec<SweepReport>) = results.into_iter().unzip();
    if let Some(p) = profile {
        let nfft = nfft.unwrap_or(radar.n_samples);
        write_file(p, profile_csv(&cleaned, &radar, window, nfft)?.as_bytes())?;
    }
    sweepfile::write(output, &SweepFile::new(&radar, cleaned)?)?;
    if let Some(p) = report {
        let json = serde_json::to_string_pretty(&reports).expect("reports serialize");
        write_file(p, json.as_bytes())?;
    }
    Ok(())
}

fn cmd_study(config: &Path, output: Option<&Path>, trials: Option<usize>, seed: Option<u64>) -> CliResult<()> {
    let mut study = load_config(config)?.study()?;
    if let Some(t) = trials {
        study.trials = t;
    }
    if let Some(s) = seed {
        study.seed = s;
    }
    let csv = metrics::monte_carlo(&study)?.to_csv();
    match output {
        Some(p) => write_file(p, csv.as_bytes()),
        None => {
            print!("{csv}");
            Ok(())
        }
    }
}

/// Dense matrix CSV: a header row of ranges, then one row per Doppler bin
/// (ascending frequency) led by its Doppler value.
fn rd_csv(map: &RdMap, values: &[f64]) -> String {
    let mut out = String::from("doppler_hz\\range_m");
    for r in &map.range_m {
        let _ = write!(out, ",{r}");
    }
    out.push('\n');
    let mut order: Vec<usize> = (0..map.rows).collect();
    order.sort_by(|a, b| map.doppler_hz[*a].total_cmp(&map.doppler_hz[*b]));
    for row in order {
        let _ = write!(out, "{}", map.doppler_hz[row]);
        for v in &values[row * map.cols..(row + 1) * map.cols] {
            let _ = write!(out, ",{v}");
        }
        out.push('\n');
    }
    out
}

#[allow(clippy::too_many_arguments)]
fn cmd_rd(
    input: &Path,
    out_dir: &Path,
    est: &EstimatorArgs,
    gap_args: &GapArgs,
    no_mitigation: bool,
    nfft: Option<usize>,
    window: Window,
) -> CliResult<()> {
    let file = sweepfile::read(input)?;
    let radar = file.header.radar()?;
    let nfft = nfft.unwrap_or(radar.n_samples);
    std::fs::create_dir_all(out_dir).map_err(|e| io_err(out_dir, e))?;
    let bins = spectra::slow_time_dft(&file.sweeps, Window::Rect)?;
    let before = spectra::rd_from_bins(&bins, &radar, window, nfft)?;
    let before_db = before.power_db();
    write_file(&out_dir.join("rd_before.csv"), rd_csv(&before, &before_db).as_bytes())?;
    if no_mitigation {
        write_file(&out_dir.join("rd_after.csv"), rd_csv(&before, &before_db).as_bytes())?;
        let zeros = vec![0.0; before_db.len()];
        write_file(&out_dir.join("rd_diff.csv"), rd_csv(&before, &zeros).as_bytes())?;
        return Ok(());
    }
    let gap = match gap_source(gap_args, input)? {
        GapSource::Fixed(g) => g,
        GapSource::Detect { win, k_mad } => {
            // Detect on the mean power envelope across sweeps.
            let n = radar.n_samples;
            let mut env = vec![num_complex::Complex64::new(0.0, 0.0); n];
            for s in &file.sweeps {
                for (e, v) in env.iter_mut().zip(&s.samples) {
                    e.re += v.norm_sqr();
                }
            }
            env.iter_mut().for_each(|e| e.re = e.re.sqrt());
            mitigate::detect_interference(&ComplexSeries::new(env, radar.dt())?, win, k_mad)?
        }
    };
    let cfg = CpiConfig {
        method: est.method,
        mp: est.mp(CpiConfig::default().mp),
        fallback_to_zero: true,
    };
    let (after_bins, reports) = spectra::mitigate_bins(&bins, gap, &cfg)?;
    let failed = reports.iter().filter(|r| r.failure.is_some()).count();
    if failed > 0 {
        eprintln!("{failed} of {} Doppler bins fell back to zeroing", reports.len());
    }
    let after = spectra::rd_from_bins(&after_bins, &radar, window, nfft)?;
    let after_db = after.power_db();
    write_file(&out_dir.join("rd_after.csv"), rd_csv(&after, &after_db).as_bytes())?;
    // Linear power difference against zeroing, unless zeroing is the method itself.
    let baseline = if est.method == Method::Zeroing {
        before.power()
    } else {
        let zero_cfg = CpiConfig {
            method: Method::Zeroing,
            ..cfg
        };
        let (zero_bins, _) = spectra::mitigate_bins(&bins, gap, &zero_cfg)?;
        spectra::rd_from_bins(&zero_bins, &radar, window, nfft)?.power()
    };
    let diff: Vec<f64> = after.power().iter().zip(&baseline).map(|(a, b)| a - b).collect();
    write_file(&out_dir.join("rd_diff.csv"), rd_csv(&after, &diff).as_bytes())?;
    let json = serde_json::to_string_pretty(&reports).expect("reports serialize");
    write_file(&out_dir.join("rd_reports.json"), json.as_bytes())
}

fn run(cli: Cli) -> CliResult<()> {
    match &cli.command {
        Command::Simulate { config, out_dir, seed } => cmd_simulate(config, out_dir, *seed),
        Command::Mitigate {
            input,
            output,
            est,
            gap,
            report,
            profile_csv,
            nfft,
            window,
        } => cmd_mitigate(
            input,
            output,
            est,
            gap,
            report.as_deref(),
            profile_csv.as_deref(),
            *nfft,
            *window,
        ),
        Command::Study {
            config,
            output,
            trials,
            seed,
        } => cmd_study(config, output.as_deref(), *trials, *seed),
        Command::Rd {
            input,
            out_dir,
            est,
            gap,
            no_mitigation,
            nfft,
            window,
        } => cmd_rd(input, out_dir, est, gap, *no_mitigation, *nfft, *window),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(w) = cli.workers {
        if w == 0 {
            eprintln!("configuration error: --workers must be positive");
            return ExitCode::from(2);
        }
        pool = pool.num_threads(w);
    }
    let pool = match pool.build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("configuration error: {e}");
            return ExitCode::from(2);
        }
    };
    match pool.install(|| run(cli)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.code())
        }
    }
}
