//! File formats, scenario configuration and synthetic sensor records.
//!
//! Sensor series are CSV with the header `t_s,p_pa`. Scenario configs are flat
//! `key = value` text with `#` comments; lengths may be given in km through the
//! `_km` key variants and are converted on load.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, Read, Write};
use std::path::Path;

use crate::analytic::{inlet_pressure, AmplitudeVariant, SeriesConfig};
use crate::calibration::{calibrate_k, inlet_model, KMode, PressureSeries};
use crate::error::{Error, Result};
use crate::fd::{fd_solve, FdConfig};
use crate::field::ScalarField;
use crate::analytic::SegmentId;
use crate::model::{split_gradient, FlowBoundary, FrictionInputs, LeakScenario, PipelineSpec};

/// The reference two-line scenario: 100 km lines, leak at 25 km.
pub const REFERENCE_CONFIG: &str = include_str!("../data/reference.conf");
/// Published inlet pressure record for the reference scenario, 0 to 1500 s.
pub const REFERENCE_INLET_CSV: &str = include_str!("../data/reference_inlet.csv");
/// Noise-free forward-model inlet record of the reference scenario, 0 to 1200 s at 1 s.
pub const SYNTHETIC_INLET_CSV: &str = include_str!("../data/synthetic_25km.csv");

pub const SERIES_HEADER: [&str; 2] = ["t_s", "p_pa"];

/// Everything needed to evaluate one scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioBundle {
    pub spec: PipelineSpec,
    pub boundary: FlowBoundary,
    pub scenario: LeakScenario,
    pub series_cfg: SeriesConfig,
    pub notes: String,
}

impl ScenarioBundle {
    /// The bundled reference scenario.
    pub fn reference() -> Self {
        let (bundle, _) = parse_config(REFERENCE_CONFIG).expect("bundled config is valid");
        bundle
    }
}

/// Relative Gaussian noise applied as `p·(1 + σ·z)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    pub sigma_rel: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn new(sigma_rel: f64, seed: u64) -> Result<Self> {
        if !(sigma_rel.is_finite() && sigma_rel >= 0.0) {
            return Err(Error::InvalidSampling(format!("noise level must be non-negative, got {sigma_rel}")));
        }
        Ok(NoiseSpec { sigma_rel, seed })
    }

    pub fn none() -> Self {
        NoiseSpec { sigma_rel: 0.0, seed: 0 }
    }
}

/// Sample times `t_start, t_start + dt, …` up to `t_end` inclusive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sampling {
    t_start: f64,
    t_end: f64,
    dt: f64,
}

impl Sampling {
    pub fn new(t_start: f64, t_end: f64, dt: f64) -> Result<Self> {
        if !(t_start.is_finite() && t_start >= 0.0) {
            return Err(Error::InvalidSampling(format!("start time must be non-negative, got {t_start}")));
        }
        if !(t_end.is_finite() && t_end > t_start) {
            return Err(Error::InvalidSampling(format!("end time {t_end} must exceed start time {t_start}")));
        }
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::InvalidSampling(format!("sampling step must be positive, got {dt}")));
        }
        Ok(Sampling { t_start, t_end, dt })
    }

    pub fn times(&self) -> Vec<f64> {
        let count = ((self.t_end - self.t_start) / self.dt + 1e-9).floor() as usize;
        (0..=count).map(|i| self.t_start + i as f64 * self.dt).collect()
    }

    pub fn t_end(&self) -> f64 {
        self.t_end
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Hash)]
pub enum SeriesSource {
    /// Closed-form inlet pressure of the damaged line.
    #[default]
    AnalyticForward,
    /// Inlet node of the finite-difference march, default grid.
    FdForward,
    /// `P₁·e^{-βt}`.
    PureExponential,
}

impl SeriesSource {
    pub fn tag(self) -> &'static str {
        match self {
            SeriesSource::AnalyticForward => "analytic",
            SeriesSource::FdForward => "fd",
            SeriesSource::PureExponential => "exponential",
        }
    }

    pub fn from_tag(tag: &str) -> Option<Self> {
        match tag {
            "analytic" => Some(SeriesSource::AnalyticForward),
            "fd" => Some(SeriesSource::FdForward),
            "exponential" => Some(SeriesSource::PureExponential),
            _ => None,
        }
    }
}

/// SplitMix64 feeding a Box–Muller transform.
///
/// Each 64-bit output `z` becomes a uniform `u = ((z >> 11) + 1)·2⁻⁵³ ∈ (0, 1]`.
/// Normals come in pairs from two consecutive uniforms `u₁, u₂`:
/// `√(−2 ln u₁)·cos(2πu₂)` first, then `√(−2 ln u₁)·sin(2πu₂)`. Any language
/// with 64-bit wrapping arithmetic can regenerate the same stream from a seed.
#[derive(Debug, Clone)]
pub struct GaussianStream {
    state: u64,
    spare: Option<f64>,
}

impl GaussianStream {
    pub fn new(seed: u64) -> Self {
        GaussianStream { state: seed, spare: None }
    }

    fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    fn next_uniform(&mut self) -> f64 {
        ((self.next_u64() >> 11) + 1) as f64 / (1u64 << 53) as f64
    }

    pub fn next_normal(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let u1 = self.next_uniform();
        let u2 = self.next_uniform();
        let radius = (-2.0 * u1.ln()).sqrt();
        let angle = 2.0 * std::f64::consts::PI * u2;
        self.spare = Some(radius * angle.sin());
        radius * angle.cos()
    }
}

/// Samples the inlet pressure of a scenario and applies multiplicative noise.
pub fn synth_series(
    bundle: &ScenarioBundle,
    sampling: &Sampling,
    noise: &NoiseSpec,
    source: SeriesSource,
) -> Result<PressureSeries> {
    let ScenarioBundle { spec, boundary, scenario, series_cfg, .. } = bundle;
    let times = sampling.times();
    let clean: Vec<f64> = match source {
        SeriesSource::PureExponential => {
            times.iter().map(|&t| inlet_model(boundary.inlet_pressure(), scenario.decay_beta(), t)).collect()
        }
        SeriesSource::AnalyticForward => {
            times.iter().map(|&t| inlet_pressure(spec, boundary, scenario, series_cfg, t)).collect::<Result<_>>()?
        }
        SeriesSource::FdForward => {
            let base = FdConfig::default();
            let steps = (sampling.t_end() / base.dt).ceil().max(10.0);
            let t_end = steps * base.dt;
            let cfg = FdConfig { t_end, output_interval: t_end, ..base };
            let sol = fd_solve(spec, boundary, scenario, &cfg)?;
            let trace = PressureSeries::new(sol.inlet_trace)?;
            times.iter().map(|&t| trace.interpolate(t).expect("trace spans the sampling")).collect()
        }
    };
    let mut rng = GaussianStream::new(noise.seed);
    let samples = times
        .iter()
        .zip(clean)
        .map(|(&t, p)| {
            let z = rng.next_normal();
            (t, if noise.sigma_rel == 0.0 { p } else { p * (1.0 + noise.sigma_rel * z) })
        })
        .collect();
    PressureSeries::new(samples)
}

/// Parses a sensor CSV with header `t_s,p_pa`.
pub fn read_series<R: Read>(source: R) -> Result<PressureSeries> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(source);
    let headers = reader.headers()?.clone();
    if headers.len() != 2 || headers.get(0) != Some(SERIES_HEADER[0]) || headers.get(1) != Some(SERIES_HEADER[1]) {
        return Err(Error::Parse { line: 1, msg: format!("expected header `t_s,p_pa`, found `{}`", headers.iter().collect::<Vec<_>>().join(",")) });
    }
    let mut samples: Vec<(f64, f64)> = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        if record.len() != 2 {
            return Err(Error::Parse { line, msg: format!("expected 2 fields, found {}", record.len()) });
        }
        let field = |i: usize, name: &str| -> Result<f64> {
            let raw = &record[i];
            raw.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::Parse { line, msg: format!("{name} `{raw}` is not a finite number") })
        };
        let t = field(0, "time")?;
        let p = field(1, "pressure")?;
        if p <= 0.0 {
            return Err(Error::Parse { line, msg: format!("pressure {p} must be positive") });
        }
        if let Some(&(prev, _)) = samples.last() {
            if t <= prev {
                return Err(Error::Order { line, t });
            }
        }
        samples.push((t, p));
    }
    if samples.is_empty() {
        return Err(Error::EmptyInput);
    }
    PressureSeries::new(samples)
}

pub fn read_series_path(path: &Path) -> Result<PressureSeries> {
    read_series(BufReader::new(File::open(path)?))
}

/// Writes `t_s,p_pa` rows with nine significant digits.
pub fn write_series<W: Write>(series: &PressureSeries, sink: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(SERIES_HEADER)?;
    for &(t, p) in series.samples() {
        w.write_record([format!("{t:.8e}"), format!("{p:.8e}")])?;
    }
    w.flush()?;
    Ok(())
}

/// Time label used in column names: `100` for 100 s, `0.5` for half a second.
fn time_label(t: f64) -> String {
    format!("{t}")
}

/// Table with an `x_m` column and one `seg{n}_t{t}` column per segment and time.
/// Values outside a segment's domain are left empty.
pub fn write_profile_table<W: Write>(field: &ScalarField, sink: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    let mut header = vec!["x_m".to_string()];
    for &t in field.t_grid() {
        for seg in SegmentId::ALL {
            header.push(format!("seg{}_t{}", seg.number(), time_label(t)));
        }
    }
    w.write_record(&header)?;
    for (ix, &x) in field.x_grid().iter().enumerate() {
        let mut row = vec![format!("{x:.8e}")];
        for it in 0..field.t_grid().len() {
            for seg in SegmentId::ALL {
                row.push(field.get(seg, ix, it).map(|v| format!("{v:.8e}")).unwrap_or_default());
            }
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// A named curve for plotting.
#[derive(Debug, Clone, PartialEq)]
pub struct PlotSeries {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

/// Long-form `series,t,value` rows, one per point.
pub fn write_plot_data<W: Write>(curves: &[PlotSeries], sink: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(["series", "t", "value"])?;
    for curve in curves {
        for &(t, v) in &curve.points {
            w.write_record([curve.name.clone(), format!("{t:.8e}"), format!("{v:.8e}")])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Every key the config parser understands.
pub const CONFIG_KEYS: &[&str] = &[
    "pipeline.length_m",
    "pipeline.length_km",
    "pipeline.sound_speed_mps",
    "pipeline.lin_coeff_2a_per_s",
    "pipeline.friction_lambda",
    "pipeline.base_velocity_mps",
    "pipeline.diameter_m",
    "pipeline.gravity_mps2",
    "flow.inlet_pressure_pa",
    "flow.g0_pa_s_per_m",
    "flow.gradient_pa_per_m",
    "leak.location_m",
    "leak.location_km",
    "leak.k",
    "leak.k_mode",
    "leak.beta_per_s",
    "series.n_terms",
    "series.c_const",
    "series.degeneracy_tol",
    "series.amplitude",
    "notes",
];

struct Entries {
    map: BTreeMap<String, (usize, String)>,
}

impl Entries {
    fn raw(&self, key: &str) -> Option<&str> {
        self.map.get(key).map(|(_, v)| v.as_str())
    }

    fn number(&self, key: &str) -> Result<Option<f64>> {
        let Some((line, raw)) = self.map.get(key) else { return Ok(None) };
        raw.parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .map(Some)
            .ok_or_else(|| Error::Config(format!("line {line}: `{key}` expects a number, got `{raw}`")))
    }

    fn required(&self, key: &str) -> Result<f64> {
        self.number(key)?.ok_or_else(|| Error::Config(format!("missing required key `{key}`")))
    }

    /// A length given either in metres or in kilometres, not both.
    fn length(&self, stem: &str, required: bool) -> Result<Option<f64>> {
        let m_key = format!("{stem}_m");
        let km_key = format!("{stem}_km");
        match (self.number(&m_key)?, self.number(&km_key)?) {
            (Some(_), Some(_)) => Err(Error::Config(format!("give only one of `{m_key}` and `{km_key}`"))),
            (Some(m), None) => Ok(Some(m)),
            (None, Some(km)) => Ok(Some(km * 1e3)),
            (None, None) if required => Err(Error::Config(format!("missing required key `{m_key}` (or `{km_key}`)"))),
            (None, None) => Ok(None),
        }
    }
}

fn invalid(key: &str, err: Error) -> Error {
    Error::Config(format!("`{key}`: {err}"))
}

/// Parses a scenario config. Returns the bundle and warnings for unknown keys.
pub fn parse_config(text: &str) -> Result<(ScenarioBundle, Vec<String>)> {
    let mut map = BTreeMap::new();
    let mut warnings = Vec::new();
    for (i, raw_line) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw_line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {line_no}: expected `key = value`, got `{line}`")))?;
        let key = key.trim().to_string();
        let value = value.trim().to_string();
        if !CONFIG_KEYS.contains(&key.as_str()) {
            warnings.push(format!("line {line_no}: unknown key `{key}` ignored"));
            continue;
        }
        if map.insert(key.clone(), (line_no, value)).is_some() {
            return Err(Error::Config(format!("line {line_no}: key `{key}` given twice")));
        }
    }
    let e = Entries { map };

    let length = e.length("pipeline.length", true)?.expect("required");
    let sound_speed = e.required("pipeline.sound_speed_mps")?;
    let friction = ["pipeline.friction_lambda", "pipeline.base_velocity_mps", "pipeline.diameter_m"];
    let friction_given: Vec<Option<f64>> = friction.iter().map(|k| e.number(k)).collect::<Result<_>>()?;
    let mut spec = match (e.number("pipeline.lin_coeff_2a_per_s")?, friction_given.as_slice()) {
        (Some(two_a), [None, None, None]) => {
            PipelineSpec::new(length, sound_speed, two_a).map_err(|err| invalid("pipeline", err))?
        }
        (None, [Some(lambda), Some(v0), Some(d)]) => PipelineSpec::from_friction(
            length,
            sound_speed,
            FrictionInputs { lambda: *lambda, base_velocity: *v0, diameter: *d },
        )
        .map_err(|err| invalid("pipeline", err))?,
        (Some(_), _) => {
            return Err(Error::Config(
                "give either `pipeline.lin_coeff_2a_per_s` or the friction inputs, not both".into(),
            ))
        }
        (None, _) => {
            return Err(Error::Config(
                "missing required key `pipeline.lin_coeff_2a_per_s` (or all of `pipeline.friction_lambda`, \
                 `pipeline.base_velocity_mps`, `pipeline.diameter_m`)"
                    .into(),
            ))
        }
    };
    if let Some(g) = e.number("pipeline.gravity_mps2")? {
        spec = spec.with_gravity(g).map_err(|err| invalid("pipeline.gravity_mps2", err))?;
    }

    let p1 = e.required("flow.inlet_pressure_pa")?;
    let g0 = e.required("flow.g0_pa_s_per_m")?;
    let gradient = e.number("flow.gradient_pa_per_m")?.unwrap_or_else(|| split_gradient(&spec, g0));
    let boundary = FlowBoundary::new(&spec, p1, g0, gradient).map_err(|err| invalid("flow", err))?;

    let k_mode = match e.raw("leak.k_mode") {
        None => KMode::default(),
        Some(tag) => KMode::from_tag(tag)
            .ok_or_else(|| Error::Config(format!("`leak.k_mode` must be paper-numeric or formula-with-g, got `{tag}`")))?,
    };
    let location = e.length("leak.location", true)?.expect("required");
    let k = match e.number("leak.k")? {
        Some(k) => k,
        None => calibrate_k(&spec, &boundary, k_mode).map_err(|err| invalid("leak.k", err))?,
    };
    let beta = e.required("leak.beta_per_s")?;
    let scenario = LeakScenario::new(&spec, location, k, beta).map_err(|err| invalid("leak", err))?.with_k_mode(k_mode);

    let mut series_cfg = SeriesConfig::default();
    if let Some((line, raw)) = e.map.get("series.n_terms") {
        series_cfg.n_terms = raw
            .parse::<usize>()
            .ok()
            .filter(|&n| n >= 1)
            .ok_or_else(|| Error::Config(format!("line {line}: `series.n_terms` expects a positive integer, got `{raw}`")))?;
    }
    if let Some(c) = e.number("series.c_const")? {
        series_cfg.c_const = c;
    }
    if let Some(tol) = e.number("series.degeneracy_tol")? {
        series_cfg.degeneracy_tol = tol;
    }
    if let Some(tag) = e.raw("series.amplitude") {
        series_cfg.amplitude = AmplitudeVariant::from_tag(tag)
            .ok_or_else(|| Error::Config(format!("`series.amplitude`: unknown variant `{tag}`")))?;
    }
    series_cfg.validate().map_err(|err| invalid("series", err))?;

    let notes = e.raw("notes").unwrap_or("").to_string();
    Ok((ScenarioBundle { spec, boundary, scenario, series_cfg, notes }, warnings))
}

pub fn load_config(path: &Path) -> Result<(ScenarioBundle, Vec<String>)> {
    let mut text = String::new();
    File::open(path)?.read_to_string(&mut text)?;
    parse_config(&text)
}
