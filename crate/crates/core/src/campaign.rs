//! Verification campaigns driven by a plain-text `key = value` config.
//!
//! Each campaign maps a pure per-sample computation over a rayon pool and
//! collects the results in sample order, so every reported number is
//! independent of the worker count. A campaign writes `<name>.csv` (one row
//! per sample) and `<name>.summary` into the output directory. The first line
//! of both files is a `# generated:` timestamp; everything after it is
//! byte-reproducible for a fixed config.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use thiserror::Error;

use crate::error::GeometryError;
use crate::exterior::annihilator_dimension;
use crate::field::{
    calibrate_integrability_constant, curvature_g2_check, fernandez_gray_at,
    integrability_threshold, Family, Point, StructureField, DEFAULT_FREQUENCY,
};
use crate::format::{g2point_from_text, g2point_to_text, FormatError};
use crate::g2::{unit, G2Point};
use crate::instanton::{
    cr_holomorphicity_report, cr_residual_via_hodge, instanton_residual_at, ConnectionData,
    ConnectionFamily, CurvatureSource,
};
use crate::sampling::{base_points, twistor_samples};
use crate::suite::{pointwise_sample, PointwiseSample};
use crate::twistor::{
    involutivity_report, step1_vertical_obstruction, twistor_point, Extension, Polarity,
};

#[derive(Debug, Error)]
pub enum CampaignError {
    #[error("usage error: {0}")]
    Usage(String),
    #[error("config error{}: {message}", line.map(|l| format!(" (line {l})")).unwrap_or_default())]
    Config {
        line: Option<usize>,
        message: String,
    },
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error("worker pool: {0}")]
    Pool(String),
}

impl CampaignError {
    /// Process exit status: 2 usage, 3 config, 4 runtime failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            CampaignError::Usage(_) => 2,
            CampaignError::Config { .. } => 3,
            _ => 4,
        }
    }
}

fn config_error(line: Option<usize>, message: impl Into<String>) -> CampaignError {
    CampaignError::Config {
        line,
        message: message.into(),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Campaign {
    Pointwise,
    Integrability,
    Twistor,
    Instanton,
    All,
}

impl Campaign {
    pub const NAMES: [&'static str; 5] =
        ["pointwise", "integrability", "twistor", "instanton", "all"];

    pub fn name(self) -> &'static str {
        match self {
            Campaign::Pointwise => "pointwise",
            Campaign::Integrability => "integrability",
            Campaign::Twistor => "twistor",
            Campaign::Instanton => "instanton",
            Campaign::All => "all",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "pointwise" => Campaign::Pointwise,
            "integrability" => Campaign::Integrability,
            "twistor" => Campaign::Twistor,
            "instanton" => Campaign::Instanton,
            "all" => Campaign::All,
            _ => return None,
        })
    }

    fn expand(self) -> Vec<Campaign> {
        match self {
            Campaign::All => vec![
                Campaign::Pointwise,
                Campaign::Integrability,
                Campaign::Twistor,
                Campaign::Instanton,
            ],
            c => vec![c],
        }
    }
}

/// Tolerances with their defaults; any of them can be overridden with
/// `tolerance.<name> = value`.
pub const TOLERANCES: [(&str, f64); 13] = [
    ("metric", 1e-10),
    ("projector", 1e-10),
    ("equivariance", 1e-8),
    ("type11", 1e-10),
    ("quaternion", 1e-10),
    ("cross", 1e-12),
    ("witness", 1e-3),
    ("lambda14", 1e-10),
    ("floor_min", 1e-12),
    ("floor_factor", 10.0),
    ("instanton", 1e-10),
    ("cr", 1e-10),
    ("two_path", 1e-10),
];

/// Verdict keys accepted by `expect.<key>` and their possible values.
pub const VERDICTS: [(&str, [&str; 2]); 6] = [
    ("pointwise", ["pass", "fail"]),
    ("lambda14_restriction", ["type-11", "mixed"]),
    ("integrability", ["torsion-free", "not-torsion-free"]),
    ("twistor", ["involutive", "non-involutive"]),
    ("instanton", ["instanton", "not-instanton"]),
    ("cr", ["cr-holomorphic", "not-cr-holomorphic"]),
];

pub const RESOLUTIONS: [usize; 4] = [8, 16, 32, 64];

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub campaign: Campaign,
    pub generator: String,
    pub epsilon: f64,
    pub frequency: Vec<i32>,
    pub resolution: usize,
    pub samples: usize,
    pub seed: u64,
    /// 0 lets rayon pick.
    pub workers: usize,
    pub out: PathBuf,
    pub connection: String,
    pub connection_index: usize,
    pub connection_vector: [f64; 7],
    pub connection_s: f64,
    pub connection_amplitude: f64,
    /// Optional `g2point` table used as the base structure of the pointwise suite.
    pub structure: Option<PathBuf>,
    pub tolerances: BTreeMap<String, f64>,
    pub expect: BTreeMap<String, String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            campaign: Campaign::All,
            generator: "flat".into(),
            epsilon: 0.1,
            frequency: DEFAULT_FREQUENCY.to_vec(),
            resolution: 16,
            samples: 50,
            seed: 1,
            workers: 0,
            out: PathBuf::from("reports"),
            connection: "const-14".into(),
            connection_index: 0,
            connection_vector: unit(0),
            connection_s: 0.5,
            connection_amplitude: 0.5,
            structure: None,
            tolerances: BTreeMap::new(),
            expect: BTreeMap::new(),
        }
    }
}

fn parse_num<T: std::str::FromStr>(
    line: usize,
    key: &str,
    value: &str,
) -> Result<T, CampaignError> {
    value
        .parse()
        .map_err(|_| config_error(Some(line), format!("bad value `{value}` for `{key}`")))
}

fn parse_list<T: std::str::FromStr>(
    line: usize,
    key: &str,
    value: &str,
) -> Result<Vec<T>, CampaignError> {
    value
        .split(',')
        .map(|s| parse_num(line, key, s.trim()))
        .collect()
}

fn finite(line: usize, key: &str, v: f64) -> Result<f64, CampaignError> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(config_error(Some(line), format!("`{key}` must be finite")))
    }
}

const CONNECTIONS: [&str; 5] = ["flat", "const-14", "const-7", "mixed", "su2-wave"];

impl RunConfig {
    /// Reads a config file; an unreadable file is a usage error.
    pub fn from_file(path: &Path) -> Result<Self, CampaignError> {
        let text = fs::read_to_string(path).map_err(|e| {
            CampaignError::Usage(format!("cannot read config {}: {e}", path.display()))
        })?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CampaignError> {
        let mut cfg = RunConfig::default();
        let mut seen = BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = n + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let (key, value) = body
                .split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or_else(|| config_error(Some(line), "expected `key = value`"))?;
            if seen.insert(key.to_string(), line).is_some() {
                return Err(config_error(Some(line), format!("duplicate key `{key}`")));
            }
            cfg.set(line, key, value)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn set(&mut self, line: usize, key: &str, value: &str) -> Result<(), CampaignError> {
        match key {
            "campaign" => {
                self.campaign = Campaign::parse(value).ok_or_else(|| {
                    config_error(Some(line), format!("unknown campaign `{value}`"))
                })?
            }
            "generator" => self.generator = value.to_string(),
            "epsilon" => self.epsilon = finite(line, key, parse_num(line, key, value)?)?,
            "frequency" => self.frequency = parse_list(line, key, value)?,
            "resolution" => self.resolution = parse_num(line, key, value)?,
            "samples" => self.samples = parse_num(line, key, value)?,
            "seed" => self.seed = parse_num(line, key, value)?,
            "workers" => self.workers = parse_num(line, key, value)?,
            "out" => self.out = PathBuf::from(value),
            "structure" => self.structure = Some(PathBuf::from(value)),
            "connection" => self.connection = value.to_string(),
            "connection.index" => self.connection_index = parse_num(line, key, value)?,
            "connection.vector" => {
                let v: Vec<f64> = parse_list(line, key, value)?;
                if v.len() != 7 || v.iter().any(|c| !c.is_finite()) || v.iter().all(|c| *c == 0.0) {
                    return Err(config_error(
                        Some(line),
                        "`connection.vector` needs 7 finite entries, not all zero",
                    ));
                }
                self.connection_vector = std::array::from_fn(|i| v[i]);
            }
            "connection.s" => self.connection_s = finite(line, key, parse_num(line, key, value)?)?,
            "connection.amplitude" => {
                self.connection_amplitude = finite(line, key, parse_num(line, key, value)?)?
            }
            _ => {
                if let Some(name) = key.strip_prefix("tolerance.") {
                    if !TOLERANCES.iter().any(|(k, _)| *k == name) {
                        return Err(config_error(
                            Some(line),
                            format!("unknown tolerance `{name}`"),
                        ));
                    }
                    let v: f64 = parse_num(line, key, value)?;
                    if !(v.is_finite() && v > 0.0) {
                        return Err(config_error(
                            Some(line),
                            format!("tolerance `{name}` must be positive"),
                        ));
                    }
                    self.tolerances.insert(name.to_string(), v);
                } else if let Some(name) = key.strip_prefix("expect.") {
                    let (_, values) =
                        VERDICTS.iter().find(|(k, _)| *k == name).ok_or_else(|| {
                            config_error(Some(line), format!("unknown verdict `{name}`"))
                        })?;
                    if !values.contains(&value) {
                        return Err(config_error(
                            Some(line),
                            format!("`{key}` must be one of {}", values.join(", ")),
                        ));
                    }
                    self.expect.insert(name.to_string(), value.to_string());
                } else {
                    return Err(config_error(Some(line), format!("unknown key `{key}`")));
                }
            }
        }
        Ok(())
    }

    /// Checks invariants after parsing or after command-line overrides.
    pub fn validate(&self) -> Result<(), CampaignError> {
        self.family()?;
        if !CONNECTIONS.contains(&self.connection.as_str()) {
            return Err(config_error(
                None,
                format!("unknown connection `{}`", self.connection),
            ));
        }
        if !RESOLUTIONS.contains(&self.resolution) {
            return Err(config_error(
                None,
                format!(
                    "resolution must be one of 8, 16, 32, 64 (got {})",
                    self.resolution
                ),
            ));
        }
        if self.samples == 0 {
            return Err(config_error(None, "samples must be at least 1"));
        }
        if self.connection_index >= 14 {
            return Err(config_error(None, "connection.index must be below 14"));
        }
        Ok(())
    }

    pub fn family(&self) -> Result<Family, CampaignError> {
        let freq: [i32; 7] = match self.frequency.len() {
            7 => std::array::from_fn(|i| self.frequency[i]),
            1 if self.generator == "conformal" => [self.frequency[0], 0, 0, 0, 0, 0, 0],
            n => {
                return Err(config_error(
                    None,
                    format!("frequency needs 7 integers (got {n})"),
                ))
            }
        };
        Family::from_key(&self.generator, self.epsilon, freq)
            .ok_or_else(|| config_error(None, format!("unknown generator `{}`", self.generator)))
    }

    pub fn connection_family(&self) -> ConnectionFamily {
        match self.connection.as_str() {
            "flat" => ConnectionFamily::Flat,
            "const-14" => ConnectionFamily::Const14 {
                index: self.connection_index,
            },
            "const-7" => ConnectionFamily::Const7 {
                vector: self.connection_vector,
            },
            "mixed" => ConnectionFamily::Mixed {
                index: self.connection_index,
                vector: self.connection_vector,
                s: self.connection_s,
            },
            _ => ConnectionFamily::Su2Wave {
                amplitude: self.connection_amplitude,
            },
        }
    }

    pub fn tolerance(&self, name: &str) -> f64 {
        self.tolerances.get(name).copied().unwrap_or_else(|| {
            TOLERANCES
                .iter()
                .find(|(k, _)| *k == name)
                .map(|(_, v)| *v)
                .expect("registered tolerance")
        })
    }

    /// Resolved parameters in a fixed order. `workers` and `out` are left out
    /// because they cannot change any reported number.
    pub fn echo(&self) -> Vec<(String, String)> {
        let join = |v: &[String]| v.join(",");
        let mut out = vec![
            ("campaign".to_string(), self.campaign.name().to_string()),
            ("generator".into(), self.generator.clone()),
            ("epsilon".into(), format!("{:?}", self.epsilon)),
            (
                "frequency".into(),
                join(
                    &self
                        .frequency
                        .iter()
                        .map(|f| f.to_string())
                        .collect::<Vec<_>>(),
                ),
            ),
            ("resolution".into(), self.resolution.to_string()),
            ("samples".into(), self.samples.to_string()),
            ("seed".into(), self.seed.to_string()),
            ("connection".into(), self.connection.clone()),
            ("connection.index".into(), self.connection_index.to_string()),
            (
                "connection.vector".into(),
                join(
                    &self
                        .connection_vector
                        .iter()
                        .map(|c| format!("{c:?}"))
                        .collect::<Vec<_>>(),
                ),
            ),
            ("connection.s".into(), format!("{:?}", self.connection_s)),
            (
                "connection.amplitude".into(),
                format!("{:?}", self.connection_amplitude),
            ),
        ];
        if let Some(s) = &self.structure {
            out.push(("structure".into(), s.display().to_string()));
        }
        for (name, _) in TOLERANCES {
            out.push((
                format!("tolerance.{name}"),
                format!("{:?}", self.tolerance(name)),
            ));
        }
        for (k, v) in &self.expect {
            out.push((format!("expect.{k}"), v.clone()));
        }
        out
    }
}

/// One reported verdict with the outcome declared in the config, if any.
#[derive(Clone, Debug, PartialEq)]
pub struct Verdict {
    pub key: String,
    pub value: String,
    pub expected: Option<String>,
}

impl Verdict {
    pub fn matches(&self) -> bool {
        self.expected.as_ref().is_none_or(|e| *e == self.value)
    }
}

/// Output of one campaign, before timestamps are attached.
#[derive(Clone, Debug, PartialEq)]
pub struct Report {
    pub campaign: Campaign,
    /// CSV body: config echo, header and rows.
    pub csv: String,
    pub results: Vec<(String, String)>,
    pub verdicts: Vec<Verdict>,
}

#[derive(Clone, Debug)]
pub struct Outcome {
    pub reports: Vec<Report>,
    pub files: Vec<PathBuf>,
}

impl Outcome {
    pub fn all_match(&self) -> bool {
        self.reports
            .iter()
            .flat_map(|r| &r.verdicts)
            .all(Verdict::matches)
    }

    /// Diff-style listing of every verdict that differs from its expectation.
    pub fn mismatch_diff(&self) -> String {
        let mut out = String::from("--- expected\n+++ observed\n");
        for v in self
            .reports
            .iter()
            .flat_map(|r| &r.verdicts)
            .filter(|v| !v.matches())
        {
            let e = v.expected.as_deref().unwrap_or("");
            writeln!(out, "-{}: {}\n+{}: {}", v.key, e, v.key, v.value).expect("string write");
        }
        out
    }

    /// 0 when every declared expectation holds, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        if self.all_match() {
            0
        } else {
            1
        }
    }
}

fn num(x: f64) -> String {
    format!("{x:.10e}")
}

/// Nearest-rank 95th percentile.
pub fn p95(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let rank = ((0.95 * v.len() as f64).ceil() as usize).clamp(1, v.len());
    v[rank - 1]
}

fn max(values: impl IntoIterator<Item = f64>) -> f64 {
    values.into_iter().fold(0.0, f64::max)
}

struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    fn render(&self, cfg: &RunConfig) -> String {
        let mut out = String::new();
        for (k, v) in cfg.echo() {
            writeln!(out, "# {k} = {v}").expect("string write");
        }
        writeln!(out, "{}", self.header.join(",")).expect("string write");
        for r in &self.rows {
            writeln!(out, "{}", r.join(",")).expect("string write");
        }
        out
    }
}

fn point_columns(prefix: &str) -> Vec<String> {
    (0..7).map(|i| format!("{prefix}{i}")).collect()
}

fn point_cells(p: &[f64; 7]) -> Vec<String> {
    p.iter().map(|c| num(*c)).collect()
}

fn verdict(cfg: &RunConfig, key: &str, value: &str) -> Verdict {
    Verdict {
        key: key.to_string(),
        value: value.to_string(),
        expected: cfg.expect.get(key).cloned(),
    }
}

fn base_structure(cfg: &RunConfig) -> Result<G2Point, CampaignError> {
    match &cfg.structure {
        None => Ok(G2Point::standard()),
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| {
                config_error(
                    None,
                    format!("cannot read structure {}: {e}", path.display()),
                )
            })?;
            Ok(g2point_from_text(&text)?)
        }
    }
}

fn pointwise(cfg: &RunConfig) -> Result<Report, CampaignError> {
    let base = base_structure(cfg)?;
    let round_trip = g2point_from_text(&g2point_to_text(&base))?;
    let round_trip_defect = (round_trip.rho() - base.rho()).max_abs();
    let samples: Vec<PointwiseSample> = (0..cfg.samples as u64)
        .into_par_iter()
        .map(|i| pointwise_sample(&base, cfg.seed, i))
        .collect::<Result<_, _>>()?;

    let mut table = Table {
        header: [
            "sample",
            "stabilizer_dim",
            "metric_equivariance",
            "projector_defect",
            "g2_equivariance",
            "omega_11_part",
            "quaternion_defect",
            "cross_norm_defect",
            "converse_witness",
            "lambda14_mixed_part",
        ]
        .map(String::from)
        .to_vec(),
        rows: Vec::new(),
    };
    for (i, s) in samples.iter().enumerate() {
        table.rows.push(vec![
            i.to_string(),
            s.stabilizer_dim.to_string(),
            num(s.metric_equivariance),
            num(s.projector_defect),
            num(s.g2_equivariance),
            num(s.omega_11_part),
            num(s.quaternion_defect),
            num(s.cross_norm_defect),
            num(s.converse_witness),
            num(s.lambda14_mixed_part),
        ]);
    }

    let stabilizer_dim = annihilator_dimension(base.rho());
    let col = |f: fn(&PointwiseSample) -> f64| max(samples.iter().map(f));
    let metric = col(|s| s.metric_equivariance);
    let projector = col(|s| s.projector_defect);
    let equivariance = col(|s| s.g2_equivariance);
    let type11 = col(|s| s.omega_11_part);
    let quaternion = col(|s| s.quaternion_defect);
    let cross = col(|s| s.cross_norm_defect);
    let witness = samples
        .iter()
        .map(|s| s.converse_witness)
        .fold(f64::INFINITY, f64::min);
    let lambda14 = col(|s| s.lambda14_mixed_part);
    let transported_ok = samples.iter().all(|s| s.stabilizer_dim == 14);

    let pass = stabilizer_dim == 14
        && transported_ok
        && metric <= cfg.tolerance("metric")
        && projector <= cfg.tolerance("projector")
        && equivariance <= cfg.tolerance("equivariance")
        && type11 <= cfg.tolerance("type11")
        && quaternion <= cfg.tolerance("quaternion")
        && cross <= cfg.tolerance("cross")
        && witness >= cfg.tolerance("witness")
        && round_trip_defect == 0.0;
    let restriction = if lambda14 <= cfg.tolerance("lambda14") {
        "type-11"
    } else {
        "mixed"
    };

    let results = vec![
        ("stabilizer_dim".to_string(), stabilizer_dim.to_string()),
        (
            "transported_stabilizer_dims".into(),
            if transported_ok {
                "14".into()
            } else {
                "mixed".into()
            },
        ),
        (
            "metric_normalization".into(),
            num(base.normalization_residual()),
        ),
        ("metric_equivariance_max".into(), num(metric)),
        ("projector_defect_max".into(), num(projector)),
        ("g2_equivariance_max".into(), num(equivariance)),
        ("omega_11_part_max".into(), num(type11)),
        ("quaternion_defect_max".into(), num(quaternion)),
        ("cross_norm_defect_max".into(), num(cross)),
        ("converse_witness_min".into(), num(witness)),
        ("lambda14_mixed_part_max".into(), num(lambda14)),
        ("structure_round_trip".into(), num(round_trip_defect)),
    ];
    Ok(Report {
        campaign: Campaign::Pointwise,
        csv: table.render(cfg),
        results,
        verdicts: vec![
            verdict(cfg, "pointwise", if pass { "pass" } else { "fail" }),
            verdict(cfg, "lambda14_restriction", restriction),
        ],
    })
}

fn integrability(cfg: &RunConfig) -> Result<Report, CampaignError> {
    let field = StructureField::new(cfg.family()?, cfg.resolution);
    let flat = StructureField::flat(cfg.resolution);
    let points: Vec<Point> = base_points(cfg.seed, cfg.samples);
    let rows: Vec<(f64, f64, f64, f64)> = points
        .par_iter()
        .map(|p| {
            let r = fernandez_gray_at(&field, p);
            let c = curvature_g2_check(&field, p)?;
            Ok((r.d_rho, r.d_rho_star, c, fernandez_gray_at(&flat, p).max()))
        })
        .collect::<Result<_, CampaignError>>()?;
    let tau = integrability_threshold(calibrate_integrability_constant(&points), cfg.resolution);

    let mut header = vec!["sample".to_string()];
    header.extend(point_columns("m"));
    header.extend(["d_rho", "d_rho_star", "curvature_g2"].map(String::from));
    let mut table = Table {
        header,
        rows: Vec::new(),
    };
    for (i, (p, r)) in points.iter().zip(&rows).enumerate() {
        let mut row = vec![i.to_string()];
        row.extend(point_cells(p));
        row.extend([num(r.0), num(r.1), num(r.2)]);
        table.rows.push(row);
    }
    let combined: Vec<f64> = rows.iter().map(|r| r.0.max(r.1)).collect();
    let worst = max(combined.iter().copied());
    let floor = max(rows.iter().map(|r| r.3)).max(cfg.tolerance("floor_min"));
    let results = vec![
        ("max_d_rho".to_string(), num(max(rows.iter().map(|r| r.0)))),
        ("max_d_rho_star".into(), num(max(rows.iter().map(|r| r.1)))),
        ("max".into(), num(worst)),
        ("p95".into(), num(p95(&combined))),
        ("noise_floor".into(), num(floor)),
        ("threshold".into(), num(tau)),
        (
            "max_curvature_g2".into(),
            num(max(rows.iter().map(|r| r.2))),
        ),
    ];
    let v = if worst <= tau {
        "torsion-free"
    } else {
        "not-torsion-free"
    };
    Ok(Report {
        campaign: Campaign::Integrability,
        csv: table.render(cfg),
        results,
        verdicts: vec![verdict(cfg, "integrability", v)],
    })
}

fn twistor(cfg: &RunConfig) -> Result<Report, CampaignError> {
    let family = cfg.family()?;
    let field = StructureField::new(family.clone(), cfg.resolution);
    let flat = StructureField::flat(cfg.resolution);
    let is_flat = family == Family::Flat;
    let h = field.step();
    let points = twistor_samples(cfg.seed, cfg.samples);
    let rows: Vec<([f64; 7], [f64; 7], f64, f64, f64, f64, f64, f64)> = points
        .par_iter()
        .map(|(m, x)| {
            let tp = twistor_point(&field, m, x)?;
            let r = involutivity_report(
                &field,
                &tp,
                h,
                Polarity::Antiholomorphic,
                Extension::Adapted,
            );
            let s1 = step1_vertical_obstruction(&field, &tp)?;
            let floor = if is_flat {
                r.residual
            } else {
                let tf = twistor_point(&flat, m, x)?;
                involutivity_report(&flat, &tf, h, Polarity::Antiholomorphic, Extension::Adapted)
                    .residual
            };
            Ok((
                tp.m,
                tp.x,
                r.residual,
                r.theta,
                r.wrong_type,
                r.vertical,
                s1,
                floor,
            ))
        })
        .collect::<Result<_, CampaignError>>()?;

    let mut header = vec!["sample".to_string()];
    header.extend(point_columns("m"));
    header.extend(point_columns("x"));
    header.extend(
        [
            "involutivity",
            "theta",
            "wrong_type",
            "vertical",
            "step1_vertical",
        ]
        .map(String::from),
    );
    let mut table = Table {
        header,
        rows: Vec::new(),
    };
    for (i, r) in rows.iter().enumerate() {
        let mut row = vec![i.to_string()];
        row.extend(point_cells(&r.0));
        row.extend(point_cells(&r.1));
        row.extend([num(r.2), num(r.3), num(r.4), num(r.5), num(r.6)]);
        table.rows.push(row);
    }
    let residuals: Vec<f64> = rows.iter().map(|r| r.2).collect();
    let worst = max(residuals.iter().copied());
    let floor = max(rows.iter().map(|r| r.7)).max(cfg.tolerance("floor_min"));
    let threshold = cfg.tolerance("floor_factor") * floor;
    let results = vec![
        ("max".to_string(), num(worst)),
        ("p95".into(), num(p95(&residuals))),
        ("noise_floor".into(), num(floor)),
        ("threshold".into(), num(threshold)),
        (
            "max_step1_vertical".into(),
            num(max(rows.iter().map(|r| r.6))),
        ),
    ];
    let v = if worst <= threshold {
        "involutive"
    } else {
        "non-involutive"
    };
    Ok(Report {
        campaign: Campaign::Twistor,
        csv: table.render(cfg),
        results,
        verdicts: vec![verdict(cfg, "twistor", v)],
    })
}

fn instanton(cfg: &RunConfig) -> Result<Report, CampaignError> {
    let field = StructureField::new(cfg.family()?, cfg.resolution);
    let conn = ConnectionData::new(cfg.connection_family())?;
    let points = twistor_samples(cfg.seed, cfg.samples);
    let rows: Vec<([f64; 7], [f64; 7], f64, f64, f64, f64)> = points
        .par_iter()
        .map(|(m, x)| {
            let tp = twistor_point(&field, m, x)?;
            let inst = instanton_residual_at(&field, &conn, &tp.m)?;
            let cr = cr_holomorphicity_report(&conn, &tp, CurvatureSource::Analytic);
            let hodge = cr_residual_via_hodge(&conn, &tp, CurvatureSource::Analytic)?;
            Ok((tp.m, tp.x, inst, cr.residual, cr.max_pair, hodge))
        })
        .collect::<Result<_, CampaignError>>()?;

    let mut header = vec!["sample".to_string()];
    header.extend(point_columns("m"));
    header.extend(point_columns("x"));
    header.extend(
        [
            "instanton_residual",
            "cr_residual",
            "cr_max_pair",
            "cr_hodge",
            "two_path_gap",
        ]
        .map(String::from),
    );
    let mut table = Table {
        header,
        rows: Vec::new(),
    };
    for (i, r) in rows.iter().enumerate() {
        let mut row = vec![i.to_string()];
        row.extend(point_cells(&r.0));
        row.extend(point_cells(&r.1));
        row.extend([
            num(r.2),
            num(r.3),
            num(r.4),
            num(r.5),
            num((r.3 - r.5).abs()),
        ]);
        table.rows.push(row);
    }
    let inst = max(rows.iter().map(|r| r.2));
    let cr: Vec<f64> = rows.iter().map(|r| r.3).collect();
    let cr_max = max(cr.iter().copied());
    let gap = max(rows.iter().map(|r| (r.3 - r.5).abs()));
    let results = vec![
        ("connection".to_string(), conn.family.to_string()),
        ("instanton_max".into(), num(inst)),
        ("max".into(), num(cr_max)),
        ("p95".into(), num(p95(&cr))),
        ("cr_max_pair".into(), num(max(rows.iter().map(|r| r.4)))),
        ("two_path_max".into(), num(gap)),
        (
            "two_path_consistent".into(),
            (gap <= cfg.tolerance("two_path")).to_string(),
        ),
    ];
    let vi = if inst <= cfg.tolerance("instanton") {
        "instanton"
    } else {
        "not-instanton"
    };
    let vc = if cr_max <= cfg.tolerance("cr") {
        "cr-holomorphic"
    } else {
        "not-cr-holomorphic"
    };
    Ok(Report {
        campaign: Campaign::Instanton,
        csv: table.render(cfg),
        results,
        verdicts: vec![verdict(cfg, "instanton", vi), verdict(cfg, "cr", vc)],
    })
}

/// Runs the campaigns of `cfg` without touching the filesystem.
pub fn compute_reports(cfg: &RunConfig) -> Result<Vec<Report>, CampaignError> {
    cfg.validate()?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if cfg.workers > 0 {
        builder = builder.num_threads(cfg.workers);
    }
    let pool = builder
        .build()
        .map_err(|e| CampaignError::Pool(e.to_string()))?;
    pool.install(|| {
        cfg.campaign
            .expand()
            .into_iter()
            .map(|c| match c {
                Campaign::Pointwise => pointwise(cfg),
                Campaign::Integrability => integrability(cfg),
                Campaign::Twistor => twistor(cfg),
                Campaign::Instanton => instanton(cfg),
                Campaign::All => unreachable!("expanded"),
            })
            .collect()
    })
}

fn timestamp() -> String {
    let secs = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    format!("# generated: unix {secs}\n")
}

/// Summary record: indented `key: value` text.
pub fn render_summary(cfg: &RunConfig, report: &Report) -> String {
    let mut out = String::new();
    writeln!(out, "campaign: {}", report.campaign.name()).expect("string write");
    writeln!(out, "config:").expect("string write");
    for (k, v) in cfg.echo() {
        writeln!(out, "  {k}: {v}").expect("string write");
    }
    writeln!(out, "  workers: {}", cfg.workers).expect("string write");
    writeln!(out, "  out: {}", cfg.out.display()).expect("string write");
    writeln!(out, "results:").expect("string write");
    for (k, v) in &report.results {
        writeln!(out, "  {k}: {v}").expect("string write");
    }
    writeln!(out, "verdicts:").expect("string write");
    for v in &report.verdicts {
        writeln!(out, "  - key: {}", v.key).expect("string write");
        writeln!(out, "    verdict: {}", v.value).expect("string write");
        writeln!(
            out,
            "    expected: {}",
            v.expected.as_deref().unwrap_or("none")
        )
        .expect("string write");
        writeln!(out, "    match: {}", v.matches()).expect("string write");
    }
    out
}

fn write(path: PathBuf, body: &str) -> Result<PathBuf, CampaignError> {
    fs::write(&path, format!("{}{body}", timestamp())).map_err(|source| CampaignError::Io {
        path: path.clone(),
        source,
    })?;
    Ok(path)
}

/// Runs the campaigns and writes `<name>.csv` and `<name>.summary` under `cfg.out`.
pub fn run_campaign(cfg: &RunConfig) -> Result<Outcome, CampaignError> {
    let reports = compute_reports(cfg)?;
    fs::create_dir_all(&cfg.out).map_err(|source| CampaignError::Io {
        path: cfg.out.clone(),
        source,
    })?;
    let mut files = Vec::new();
    for r in &reports {
        let name = r.campaign.name();
        files.push(write(cfg.out.join(format!("{name}.csv")), &r.csv)?);
        files.push(write(
            cfg.out.join(format!("{name}.summary")),
            &render_summary(cfg, r),
        )?);
        if r.campaign == Campaign::Pointwise {
            let base = base_structure(cfg)?;
            files.push(write(
                cfg.out.join("structure.txt"),
                &g2point_to_text(&base),
            )?);
        }
    }
    Ok(Outcome { reports, files })
}

/// Drops the `# generated:` line of a report file.
pub fn strip_timestamp(text: &str) -> &str {
    match text.strip_prefix("# generated:") {
        Some(rest) => rest.split_once('\n').map(|(_, body)| body).unwrap_or(""),
        None => text,
    }
}
