use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use pipeleak::{
    calibrate_k, fit_beta, load_config, localize, pressure_field, read_series_path, reconcile, synth_series,
    write_plot_data, write_profile_table, write_series, AmplitudeVariant, BetaMethod, Error, FdConfig, KMode,
    NoiseSpec, PlotSeries, Sampling, Scaling, ScenarioBundle, Scheme, SearchConfig, SeriesSource, Target,
    WindowPolicy,
};

#[derive(Parser)]
#[command(name = "pipeleak", version, about = "Leak diagnostics for parallel gas pipelines")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Closed-form pressure field on a regular grid, written as a profile table.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        /// Spatial step, km.
        #[arg(long, default_value_t = 5.0)]
        x_step_km: f64,
        /// Time step, s.
        #[arg(long, default_value_t = 100.0)]
        t_step: f64,
        /// Last time level, s.
        #[arg(long, default_value_t = 600.0)]
        t_end: f64,
        #[command(flatten)]
        series: SeriesFlags,
    },
    /// Finite-difference solution and the amplitude reconciliation report.
    Oracle {
        #[arg(long)]
        config: PathBuf,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        /// Nodes per line.
        #[arg(long, default_value_t = 2001)]
        nx: usize,
        /// Time step, s.
        #[arg(long, default_value_t = 0.5)]
        dt: f64,
        #[arg(long, default_value_t = 600.0)]
        t_end: f64,
        /// implicit-euler or crank-nicolson.
        #[arg(long, default_value = "crank-nicolson")]
        scheme: String,
        #[command(flatten)]
        series: SeriesFlags,
    },
    /// Fits the inlet decay rate to a sensor series.
    FitBeta {
        #[arg(long)]
        series: PathBuf,
        /// log-linear or nonlinear.
        #[arg(long, default_value = "log-linear")]
        method: String,
        /// Reference inlet pressure, Pa; defaults to the first sample.
        #[arg(long)]
        p1: Option<f64>,
    },
    /// Leak coefficient K from the scenario's steady state.
    Calibrate {
        #[arg(long)]
        config: PathBuf,
        /// paper-numeric or formula-with-g; defaults to the config's mode.
        #[arg(long)]
        mode: Option<String>,
    },
    /// Estimates the leak position from an inlet series.
    Localize {
        #[arg(long)]
        series: PathBuf,
        #[arg(long)]
        config: PathBuf,
        /// paper-fixed, delay-scaled or delay-to-end.
        #[arg(long, default_value = "delay-to-end")]
        window: String,
        /// measured or closed-form.
        #[arg(long, default_value = "measured")]
        target: String,
        /// shared or independent.
        #[arg(long, default_value = "shared")]
        scaling: String,
        /// Use this decay rate instead of fitting one, 1/s.
        #[arg(long)]
        beta: Option<f64>,
        /// Leak coefficient; defaults to the config value.
        #[arg(long)]
        k: Option<f64>,
        /// Candidate spacing, m.
        #[arg(long, default_value_t = 1000.0)]
        step_m: f64,
        /// Skip the golden-section refinement.
        #[arg(long)]
        no_refine: bool,
        /// Directory for objective and curve plot data.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        series_flags: SeriesFlags,
    },
    /// Synthetic inlet series from a scenario.
    GenScenario {
        #[arg(long)]
        config: PathBuf,
        /// Output CSV file.
        #[arg(long)]
        out: PathBuf,
        /// Relative noise level.
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// analytic, fd or exponential.
        #[arg(long, default_value = "analytic")]
        source: String,
        #[arg(long, default_value_t = 0.0)]
        t_start: f64,
        #[arg(long, default_value_t = 1200.0)]
        t_end: f64,
        #[arg(long, default_value_t = 1.0)]
        dt: f64,
        #[command(flatten)]
        series: SeriesFlags,
    },
    /// Pressure table at chosen times, one column per segment and time.
    Profile {
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated times, s.
        #[arg(long, value_delimiter = ',', default_value = "100,300,600")]
        times: Vec<f64>,
        /// Output CSV file.
        #[arg(long)]
        out: PathBuf,
        /// Spatial step, km.
        #[arg(long, default_value_t = 5.0)]
        x_step_km: f64,
        #[command(flatten)]
        series: SeriesFlags,
    },
}

/// Overrides of the config's series settings.
#[derive(clap::Args)]
struct SeriesFlags {
    /// Number of series terms.
    #[arg(long)]
    terms: Option<usize>,
    /// Amplitude variant tag.
    #[arg(long)]
    amplitude: Option<String>,
}

/// Failure with a process exit code.
struct Failure {
    code: u8,
    msg: String,
}

impl From<Error> for Failure {
    fn from(err: Error) -> Self {
        let code = match err {
            Error::Io(_) => 4,
            Error::NoLeakDetected { .. } | Error::NumericalBlowup { .. } => 3,
            _ => 2,
        };
        Failure { code, msg: err.to_string() }
    }
}

fn usage(msg: String) -> Failure {
    Failure { code: 2, msg }
}

fn parse_tag<T>(kind: &str, tag: &str, parse: fn(&str) -> Option<T>) -> Result<T, Failure> {
    parse(tag).ok_or_else(|| usage(format!("unknown {kind} `{tag}`")))
}

fn load(path: &Path, flags: &SeriesFlags) -> Result<ScenarioBundle, Failure> {
    let (mut bundle, warnings) = load_config(path)?;
    for w in warnings {
        eprintln!("warning: {w}");
    }
    if let Some(n) = flags.terms {
        bundle.series_cfg.n_terms = n;
    }
    if let Some(tag) = &flags.amplitude {
        bundle.series_cfg.amplitude = parse_tag("amplitude variant", tag, AmplitudeVariant::from_tag)?;
    }
    bundle.series_cfg.validate()?;
    Ok(bundle)
}

fn regular_grid(step: f64, end: f64, what: &str) -> Result<Vec<f64>, Failure> {
    if !(step.is_finite() && step > 0.0 && end.is_finite() && end > 0.0) {
        return Err(usage(format!("{what} step and end must be positive")));
    }
    let count = (end / step + 1e-9).floor() as usize;
    let mut grid: Vec<f64> = (0..=count).map(|i| i as f64 * step).collect();
    if end - grid[grid.len() - 1] > 1e-9 * end {
        grid.push(end);
    }
    Ok(grid)
}

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    Ok(BufWriter::new(File::create(path).map_err(Error::from)?))
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Simulate { config, out, x_step_km, t_step, t_end, series } => {
            let b = load(&config, &series)?;
            let xs = regular_grid(x_step_km * 1e3, b.spec.length(), "x")?;
            let ts = regular_grid(t_step, t_end, "time")?;
            let field = pressure_field(&b.spec, &b.boundary, &b.scenario, &b.series_cfg, &xs, &ts)?;
            fs::create_dir_all(&out).map_err(Error::from)?;
            let path = out.join("pressure.csv");
            write_profile_table(&field, create(&path)?)?;
            println!("amplitude {}", b.series_cfg.amplitude.tag());
            println!("points {} x {}", xs.len(), ts.len());
            println!("wrote {}", path.display());
        }
        Command::Oracle { config, out, nx, dt, t_end, scheme, series } => {
            let b = load(&config, &series)?;
            let scheme = parse_tag("scheme", &scheme, Scheme::from_tag)?;
            let fd_cfg = FdConfig { nx_per_line: nx, dt, t_end, scheme, ..FdConfig::default() };
            let rec = reconcile(&b.spec, &b.boundary, &b.scenario, &fd_cfg, &b.series_cfg)?;
            fs::create_dir_all(&out).map_err(Error::from)?;
            let mut report = String::from("variant,max_rel,mean_rel,worst_segment,worst_x_m,worst_t_s,pde_residual\n");
            for (r, res) in rec.reports.iter().zip(&rec.residuals) {
                let w = r.worst_point;
                report.push_str(&format!(
                    "{},{:.5e},{:.5e},{},{:.5e},{:.5e},{:.5e}\n",
                    r.variant_tag,
                    r.max_rel,
                    r.mean_rel,
                    w.segment.number(),
                    w.x,
                    w.t,
                    res
                ));
                println!("{:<30} max_rel {:.5e}  mean_rel {:.5e}  residual {:.5e}", r.variant_tag, r.max_rel, r.mean_rel, res);
            }
            fs::write(out.join("reconciliation.csv"), report).map_err(Error::from)?;
            write_profile_table(&rec.fd.field, create(&out.join("fd_pressure.csv"))?)?;
            println!("selected {}", rec.selected.tag());
            println!("leak node {:.5e} m (offset {:.5e} m)", rec.fd.leak_node_x, rec.fd.leak_offset);
        }
        Command::FitBeta { series, method, p1 } => {
            let method = parse_tag("method", &method, BetaMethod::from_tag)?;
            let s = read_series_path(&series)?;
            let p1 = p1.unwrap_or(s.first().1);
            let fit = fit_beta(&s, p1, method)?;
            println!("beta {:.5e} 1/s", fit.beta);
            println!("rms_residual {:.5e} Pa", fit.rms_residual);
            println!("samples {}", fit.sample_count);
            println!("method {}", fit.method.tag());
        }
        Command::Calibrate { config, mode } => {
            let b = load(&config, &SeriesFlags { terms: None, amplitude: None })?;
            let mode = match mode {
                Some(tag) => parse_tag("mode", &tag, KMode::from_tag)?,
                None => b.scenario.k_mode(),
            };
            let k = calibrate_k(&b.spec, &b.boundary, mode)?;
            println!("K {:.5e} ({})", k, mode.tag());
        }
        Command::Localize { series, config, window, target, scaling, beta, k, step_m, no_refine, out, series_flags } => {
            let b = load(&config, &series_flags)?;
            let search = SearchConfig {
                l_grid_step: step_m,
                refine: !no_refine,
                window_policy: parse_tag("window policy", &window, WindowPolicy::from_tag)?,
                target: parse_tag("target", &target, Target::from_tag)?,
                scaling: parse_tag("scaling", &scaling, Scaling::from_tag)?,
                k_mode: b.scenario.k_mode(),
                beta_override: beta,
                ..SearchConfig::default()
            };
            let s = read_series_path(&series)?;
            let k = k.unwrap_or(b.scenario.coeff_k());
            let r = localize(&s, &b.spec, &b.boundary, k, &search, &b.series_cfg)?;
            println!("l_hat {:.5e} m", r.l_hat);
            println!("window {:.5e} {:.5e} s", r.window.0, r.window.1);
            match r.intersection_time {
                Some(t) => println!("intersection {t:.5e} s"),
                None => println!("intersection none"),
            }
            println!("beta {:.5e} 1/s", r.beta_used);
            if let Some(dir) = out {
                fs::create_dir_all(&dir).map_err(Error::from)?;
                let objective = PlotSeries { name: "objective".into(), points: r.objective_curve.clone() };
                write_plot_data(&[objective], create(&dir.join("objective.csv"))?)?;
                let lhs = PlotSeries { name: "lhs".into(), points: r.curves.iter().map(|c| (c.0, c.1)).collect() };
                let rhs = PlotSeries { name: "rhs".into(), points: r.curves.iter().map(|c| (c.0, c.2)).collect() };
                write_plot_data(&[lhs, rhs], create(&dir.join("curves.csv"))?)?;
            }
        }
        Command::GenScenario { config, out, noise, seed, source, t_start, t_end, dt, series } => {
            let b = load(&config, &series)?;
            let source = parse_tag("source", &source, SeriesSource::from_tag)?;
            let sampling = Sampling::new(t_start, t_end, dt)?;
            let s = synth_series(&b, &sampling, &NoiseSpec::new(noise, seed)?, source)?;
            write_series(&s, create(&out)?)?;
            println!("samples {}", s.len());
            println!("wrote {}", out.display());
        }
        Command::Profile { config, times, out, x_step_km, series } => {
            let b = load(&config, &series)?;
            let xs = regular_grid(x_step_km * 1e3, b.spec.length(), "x")?;
            let field = pressure_field(&b.spec, &b.boundary, &b.scenario, &b.series_cfg, &xs, &times)?;
            write_profile_table(&field, create(&out)?)?;
            println!("rows {}", xs.len());
            println!("wrote {}", out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.msg);
            ExitCode::from(f.code)
        }
    }
}
