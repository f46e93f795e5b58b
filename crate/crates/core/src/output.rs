//! Serialization of reports: time-series CSV, summary JSON and plot-ready
//! CCDF / histogram data. Every file is written atomically.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::experiments::{ExperimentReport, ReplicaSummary, TrajectoryPoint, Verdict};
use crate::config::ExperimentKind;

pub const TIMESERIES_HEADER: &str = "step,omega,lambda,alpha_global,alpha_s,e_total,e_s,gini_global,gini_s";
pub const THERMAL_HEADER: &str = "step,alpha_a,alpha_b,alpha_union,omega,lambda,gini_union";
pub const TIMESERIES_FILE: &str = "timeseries.csv";
pub const THERMAL_FILE: &str = "thermal.csv";
pub const SUMMARY_FILE: &str = "summary.json";

/// Writes `contents` to `path` through a temporary file in the same
/// directory, so readers never see a partial file.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(path, e))?;
    tmp.write_all(contents).map_err(|e| Error::io(path, e))?;
    tmp.flush().map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

/// Shortest representation that parses back to the same bits.
fn num(out: &mut String, x: f64) {
    let _ = write!(out, "{x:?}");
}

pub fn timeseries_csv(points: &[TrajectoryPoint]) -> String {
    let mut out = String::with_capacity(64 * (points.len() + 1));
    out.push_str(TIMESERIES_HEADER);
    out.push('\n');
    for p in points {
        let _ = write!(out, "{}", p.step);
        for x in [p.omega, p.lambda, p.alpha_global, p.alpha_s, p.e_total, p.e_s, p.gini_global, p.gini_s] {
            out.push(',');
            num(&mut out, x);
        }
        out.push('\n');
    }
    out
}

/// Writes the trajectory CSV. Returns a warning when there is nothing but
/// the header to write.
pub fn write_timeseries(report: &ExperimentReport, path: &Path) -> Result<Option<String>> {
    write_atomic(path, timeseries_csv(&report.trajectories).as_bytes())?;
    Ok(report
        .trajectories
        .is_empty()
        .then(|| format!("{}: empty trajectory, header only", path.display())))
}

fn parse_field(field: &str, line: usize, path: &Path) -> Result<f64> {
    field
        .parse()
        .map_err(|_| Error::validation(format!("{}:{line}", path.display()), format!("not a number: {field:?}")))
}

pub fn parse_timeseries(text: &str, path: &Path) -> Result<Vec<TrajectoryPoint>> {
    let mut lines = text.lines();
    if lines.next() != Some(TIMESERIES_HEADER) {
        return Err(Error::validation(path.display().to_string(), "unexpected header"));
    }
    let mut points = Vec::new();
    for (i, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 9 {
            return Err(Error::validation(format!("{}:{}", path.display(), i + 2), "expected 9 fields"));
        }
        let step = fields[0]
            .parse()
            .map_err(|_| Error::validation(format!("{}:{}", path.display(), i + 2), "bad step"))?;
        let mut v = [0.0; 8];
        for (k, f) in fields[1..].iter().enumerate() {
            v[k] = parse_field(f, i + 2, path)?;
        }
        points.push(TrajectoryPoint {
            step,
            omega: v[0],
            lambda: v[1],
            alpha_global: v[2],
            alpha_s: v[3],
            e_total: v[4],
            e_s: v[5],
            gini_global: v[6],
            gini_s: v[7],
        });
    }
    Ok(points)
}

pub fn read_timeseries(path: &Path) -> Result<Vec<TrajectoryPoint>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_timeseries(&text, path)
}

pub fn write_thermal(report: &ExperimentReport, path: &Path) -> Result<()> {
    let mut out = String::from(THERMAL_HEADER);
    out.push('\n');
    for p in &report.thermal {
        let _ = write!(out, "{}", p.step);
        for x in [p.alpha_a, p.alpha_b, p.alpha_union, p.omega, p.lambda, p.gini_union] {
            out.push(',');
            num(&mut out, x);
        }
        out.push('\n');
    }
    write_atomic(path, out.as_bytes())
}

/// Wall-clock and host details; never part of the digest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Meta {
    pub started_unix_ms: u128,
    pub elapsed_ms: u128,
    pub version: String,
}

impl Meta {
    pub fn new(started: std::time::SystemTime, elapsed: std::time::Duration) -> Self {
        Self {
            started_unix_ms: started
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_millis())
                .unwrap_or(0),
            elapsed_ms: elapsed.as_millis(),
            version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }
}

/// Contents of the summary JSON. Trajectories live in the CSV files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Summary {
    pub experiment: ExperimentKind,
    pub config_digest: String,
    pub config: RunConfig,
    pub seeds: Vec<u64>,
    pub verdicts: Vec<Verdict>,
    pub replicas: Vec<ReplicaSummary>,
    pub warnings: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub meta: Option<Meta>,
}

impl Summary {
    pub fn new(config: &RunConfig, report: &ExperimentReport, meta: Option<Meta>) -> Self {
        Self {
            experiment: report.experiment,
            config_digest: report.config_digest.clone(),
            config: config.clone(),
            seeds: report.seeds.clone(),
            verdicts: report.verdicts.clone(),
            replicas: report.replicas.clone(),
            warnings: report.warnings.clone(),
            meta,
        }
    }

    /// SHA-256 of the summary with `meta` removed.
    pub fn digest(&self) -> String {
        let bare = Summary { meta: None, ..self.clone() };
        let json = serde_json::to_vec(&bare).expect("summary serializes");
        hex::encode(Sha256::digest(json))
    }
}

pub fn write_summary(summary: &Summary, path: &Path) -> Result<()> {
    let mut json = serde_json::to_string_pretty(summary)
        .map_err(|e| Error::State(format!("summary serialization: {e}")))?;
    json.push('\n');
    write_atomic(path, json.as_bytes())
}

pub fn read_summary(path: &Path) -> Result<Summary> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let de = &mut serde_json::Deserializer::from_str(&text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        Error::validation(format!("{}:{}", path.display(), e.path()), e.inner().to_string())
    })
}

/// Paths written by [`write_report`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Written {
    pub timeseries: PathBuf,
    pub summary: PathBuf,
    pub thermal: Option<PathBuf>,
}

/// Writes the time series, the optional thermalization series and the
/// summary into `dir`, creating it if needed. Warnings raised while writing
/// are appended to the report.
pub fn write_report(config: &RunConfig, report: &mut ExperimentReport, dir: &Path, meta: Option<Meta>) -> Result<Written> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let timeseries = dir.join(TIMESERIES_FILE);
    if let Some(w) = write_timeseries(report, &timeseries)? {
        report.warnings.push(w);
    }
    let thermal = if report.thermal.is_empty() {
        None
    } else {
        let p = dir.join(THERMAL_FILE);
        write_thermal(report, &p)?;
        Some(p)
    };
    let summary = dir.join(SUMMARY_FILE);
    write_summary(&Summary::new(config, report, meta), &summary)?;
    Ok(Written { timeseries, summary, thermal })
}

// --------------------------------------------------------------- plot data

/// Sorted unique values with the empirical `P(X >= x)`.
pub fn ccdf(samples: &[f64]) -> Result<Vec<(f64, f64)>> {
    let sorted = checked_sorted(samples, 1)?;
    let n = sorted.len() as f64;
    let mut out = Vec::new();
    let mut i = 0;
    while i < sorted.len() {
        out.push((sorted[i], (sorted.len() - i) as f64 / n));
        let x = sorted[i];
        while i < sorted.len() && sorted[i] == x {
            i += 1;
        }
    }
    Ok(out)
}

/// Log-spaced histogram normalized to unit integral. Returns `bins + 1`
/// edges and `bins` densities. A constant sample gets one decade of width
/// centred on its value.
pub fn log_histogram(samples: &[f64], bins: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if bins < 2 {
        return Err(Error::parameter(format!("bins must be >= 2, got {bins}")));
    }
    let sorted = checked_sorted(samples, 1)?;
    let (mut lo, mut hi) = (sorted[0].ln(), sorted[sorted.len() - 1].ln());
    if hi == lo {
        lo -= 0.5 * std::f64::consts::LN_10;
        hi += 0.5 * std::f64::consts::LN_10;
    }
    let step = (hi - lo) / bins as f64;
    let mut edges: Vec<f64> = (0..=bins).map(|k| (lo + step * k as f64).exp()).collect();
    edges[0] = edges[0].min(sorted[0]);
    edges[bins] = edges[bins].max(sorted[sorted.len() - 1]);
    let mut counts = vec![0usize; bins];
    for &x in &sorted {
        let k = (((x.ln() - lo) / step).floor() as isize).clamp(0, bins as isize - 1) as usize;
        counts[k] += 1;
    }
    let n = sorted.len() as f64;
    let density = counts
        .iter()
        .enumerate()
        .map(|(k, &c)| c as f64 / (n * (edges[k + 1] - edges[k])))
        .collect();
    Ok((edges, density))
}

fn checked_sorted(samples: &[f64], min: usize) -> Result<Vec<f64>> {
    if samples.len() < min {
        return Err(Error::insufficient(format!("need at least {min} samples, got {}", samples.len())));
    }
    if let Some(x) = samples.iter().find(|x| !(x.is_finite() && **x > 0.0)) {
        return Err(Error::domain(format!("samples must be positive and finite, found {x}")));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(sorted)
}

fn two_column(header: &str, rows: impl Iterator<Item = (f64, f64)>) -> String {
    let mut out = String::from(header);
    out.push('\n');
    for (a, b) in rows {
        num(&mut out, a);
        out.push(',');
        num(&mut out, b);
        out.push('\n');
    }
    out
}

/// Writes `<prefix>_ccdf.csv` (`x,p_geq`) and `<prefix>_hist.csv`
/// (`edge,density`). The histogram has one row per lower bin edge and a
/// closing row for the upper edge with density 0.
pub fn emit_plot_data(samples: &[f64], bins: usize, prefix: &Path) -> Result<(PathBuf, PathBuf)> {
    let c = ccdf(samples)?;
    let (edges, density) = log_histogram(samples, bins)?;
    let stem = prefix.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let ccdf_path = prefix.with_file_name(format!("{stem}_ccdf.csv"));
    let hist_path = prefix.with_file_name(format!("{stem}_hist.csv"));
    write_atomic(&ccdf_path, two_column("x,p_geq", c.into_iter()).as_bytes())?;
    let rows = edges.iter().copied().zip(density.into_iter().chain(std::iter::once(0.0)));
    write_atomic(&hist_path, two_column("edge,density", rows).as_bytes())?;
    Ok((ccdf_path, hist_path))
}

/// Reads one numeric column from a CSV file. A non-numeric first line is
/// treated as a header; `column` picks the field (0-based).
pub fn read_samples(path: &Path, column: usize) -> Result<Vec<f64>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let field = line.split(',').nth(column).map(str::trim).ok_or_else(|| {
            Error::validation(format!("{}:{}", path.display(), i + 1), format!("no column {column}"))
        })?;
        match field.parse::<f64>() {
            Ok(x) => out.push(x),
            Err(_) if i == 0 => {}
            Err(_) => return Err(Error::validation(format!("{}:{}", path.display(), i + 1), format!("not a number: {field:?}"))),
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn point(step: u64, x: f64) -> TrajectoryPoint {
        TrajectoryPoint {
            step,
            omega: x,
            lambda: x / 3.0,
            alpha_global: f64::NAN,
            alpha_s: 1.0 + x.sqrt(),
            e_total: -x.ln(),
            e_s: f64::INFINITY,
            gini_global: 0.1,
            gini_s: 1e-300,
        }
    }

    #[test]
    fn three_strides_give_four_lines() {
        let pts: Vec<_> = (1..=3).map(|k| point(k, k as f64 * 0.7)).collect();
        let csv = timeseries_csv(&pts);
        assert_eq!(csv.lines().count(), 4);
        assert!(!csv.contains('\r'));
        assert!(csv.ends_with('\n'));
    }

    #[test]
    fn csv_round_trip_is_bit_exact() {
        let pts: Vec<_> = (1..=5).map(|k| point(k * 10, std::f64::consts::PI * k as f64)).collect();
        let back = parse_timeseries(&timeseries_csv(&pts), Path::new("x")).unwrap();
        assert_eq!(back.len(), pts.len());
        for (a, b) in pts.iter().zip(&back) {
            assert_eq!(a.step, b.step);
            let fa = [a.omega, a.lambda, a.alpha_global, a.alpha_s, a.e_total, a.e_s, a.gini_global, a.gini_s];
            let fb = [b.omega, b.lambda, b.alpha_global, b.alpha_s, b.e_total, b.e_s, b.gini_global, b.gini_s];
            for (x, y) in fa.iter().zip(&fb) {
                assert_eq!(x.to_bits(), y.to_bits());
            }
        }
    }

    #[test]
    fn ccdf_of_constant_is_one_step() {
        assert_eq!(ccdf(&[2.0; 7]).unwrap(), vec![(2.0, 1.0)]);
        let c = ccdf(&[1.0, 2.0, 2.0, 4.0]).unwrap();
        assert_eq!(c, vec![(1.0, 1.0), (2.0, 0.75), (4.0, 0.25)]);
    }

    #[test]
    fn histogram_integrates_to_one() {
        let xs: Vec<f64> = (1..=1000).map(|k| k as f64).collect();
        let (edges, dens) = log_histogram(&xs, 12).unwrap();
        assert_eq!(edges.len(), 13);
        let total: f64 = dens.iter().enumerate().map(|(k, d)| d * (edges[k + 1] - edges[k])).sum();
        assert!((total - 1.0).abs() < 1e-12);
        let (e2, d2) = log_histogram(&[3.0, 5.0], 2).unwrap();
        assert_eq!((e2.len(), d2.len()), (3, 2));
        assert!(log_histogram(&[1.0, 2.0], 1).is_err());
        assert!(matches!(ccdf(&[1.0, -1.0]), Err(Error::Domain(_))));
    }
}
