//! Command-line front end: config parsing, experiment dispatch, and CSV/SVG
//! emission for the `locfade` binary.
//!
//! Configs are flat JSON documents holding scenario fields next to run
//! controls; unknown keys are hard errors so a typo cannot silently fall
//! back to a default. Every emitter is a pure function of the experiment
//! result, and files land via write-to-temp plus rename, so a failing run
//! never leaves a partial artifact behind.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use crate::detect::DetectorRegime;
use crate::error::{Error, Result};
use crate::estimate::EstimatorKind;
use crate::simkit::{
    self, ExperimentResult, ResultRow, Scenario, SigmaSpec,
};
use crate::Point;

/// Reproduction driver for the localization and detection experiments.
#[derive(Debug, Parser)]
#[command(
    name = "locfade",
    version,
    about = "Time-of-arrival localization and distributed detection under Nakagami fading",
    after_help = "Environment:\n  LOCFADE_THREADS  caps the worker thread count; results are identical for any value"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

/// One subcommand per figure family, plus a meta-command that reruns the
/// whole set with the default recipes.
#[derive(Debug, Subcommand)]
pub enum Command {
    /// Localization bound sweep across SNR (figures 5 and 6)
    CrlbSweep(RunArgs),
    /// Fading SNR-loss ratio versus the shape parameter (figure 7)
    KRatio(RunArgs),
    /// Estimator mean-squared-error comparison (the ML-comparison figure)
    MleCompare(RunArgs),
    /// Fused ROC curves for the three receiver families (figures 8 and 9)
    Roc(RunArgs),
    /// Fused ROC curves across counting thresholds (figures 10 and 11)
    KSweep(RunArgs),
    /// Fused detection rate versus SNR at a fixed budget (figure 12)
    PdVsSnr(RunArgs),
    /// Centralized pooling against decision fusion (figures 14 and 15)
    CentralVsDist(RunArgs),
    /// Every experiment above, with its default recipe
    ReproAll(RunArgs),
}

/// Flags shared by every subcommand. Each one overrides the matching config
/// key when both are present.
#[derive(Debug, Args, Default)]
pub struct RunArgs {
    /// Configuration document (JSON)
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Random seed for Monte Carlo experiments
    #[arg(long)]
    pub seed: Option<u64>,
    /// Trial count for Monte Carlo experiments
    #[arg(long)]
    pub trials: Option<u64>,
    /// Output directory
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Comma-separated artifact kinds to write: csv,svg
    #[arg(long)]
    pub emit: Option<String>,
}

/// The experiments the dispatcher knows how to run.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Experiment {
    CrlbSweep,
    KRatio,
    MleCompare,
    Roc,
    KSweep,
    PdVsSnr,
    CentralVsDist,
}

impl Experiment {
    pub const ALL: [Experiment; 7] = [
        Experiment::CrlbSweep,
        Experiment::KRatio,
        Experiment::MleCompare,
        Experiment::Roc,
        Experiment::KSweep,
        Experiment::PdVsSnr,
        Experiment::CentralVsDist,
    ];

    pub fn slug(self) -> &'static str {
        match self {
            Experiment::CrlbSweep => "crlb_sweep",
            Experiment::KRatio => "k_ratio",
            Experiment::MleCompare => "mle_compare",
            Experiment::Roc => "roc",
            Experiment::KSweep => "k_sweep",
            Experiment::PdVsSnr => "pd_vs_snr",
            Experiment::CentralVsDist => "central_vs_dist",
        }
    }

    fn plot(self) -> PlotSpec {
        match self {
            Experiment::CrlbSweep => PlotSpec {
                title: "Localization bounds across SNR",
                x_label: "SNR (dB)",
                y_label: "variance bound (m^2)",
                log_x: false,
                log_y: true,
            },
            Experiment::KRatio => PlotSpec {
                title: "SNR loss versus fading shape",
                x_label: "shape parameter m",
                y_label: "loss ratio",
                log_x: true,
                log_y: false,
            },
            Experiment::MleCompare => PlotSpec {
                title: "Estimator mean squared error across SNR",
                x_label: "SNR (dB)",
                y_label: "mean squared error (m^2)",
                log_x: false,
                log_y: true,
            },
            Experiment::Roc | Experiment::KSweep => PlotSpec {
                title: "Fused receiver operating characteristics",
                x_label: "total false-alarm rate",
                y_label: "total detection rate",
                log_x: true,
                log_y: false,
            },
            Experiment::PdVsSnr => PlotSpec {
                title: "Fused detection rate versus SNR",
                x_label: "SNR (dB)",
                y_label: "total detection rate",
                log_x: false,
                log_y: false,
            },
            Experiment::CentralVsDist => PlotSpec {
                title: "Centralized pooling against decision fusion",
                x_label: "total false-alarm rate",
                y_label: "total detection rate",
                log_x: true,
                log_y: false,
            },
        }
    }
}

/// Artifact kinds the emitters can produce.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EmitKind {
    Csv,
    Svg,
}

/// Flat config document: scenario fields alongside run controls. Every key
/// is optional; anything absent takes its default.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigDoc {
    // run controls
    seed: Option<u64>,
    trials: Option<u64>,
    output_dir: Option<PathBuf>,
    emit: Option<Vec<String>>,
    // experiment knobs
    pfa_total: Option<f64>,
    k: Option<usize>,
    k_values: Option<Vec<usize>>,
    m_grid: Option<Vec<f64>>,
    regimes: Option<Vec<DetectorRegime>>,
    // scenario fields
    anchors: Option<Vec<Point>>,
    nodes: Option<Vec<Point>>,
    c: Option<f64>,
    sigma: Option<SigmaSpec>,
    m: Option<f64>,
    snr_db_grid: Option<Vec<f64>>,
    dimension: Option<usize>,
    n_samples: Option<usize>,
    estimation_regime: Option<EstimatorKind>,
    detection_regime: Option<DetectorRegime>,
}

/// Fully parsed and validated run request, before experiment defaults.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub scenario: Scenario,
    /// Whether the document spelled out an SNR grid; recipes only install
    /// their default grid when it did not.
    pub snr_grid_given: bool,
    pub seed: u64,
    pub trials: Option<usize>,
    pub output_dir: PathBuf,
    pub emit: Vec<EmitKind>,
    pub pfa_total: Option<f64>,
    pub k: Option<usize>,
    pub k_values: Option<Vec<usize>>,
    pub m_grid: Option<Vec<f64>>,
    pub regimes: Option<Vec<DetectorRegime>>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            scenario: Scenario::default(),
            snr_grid_given: false,
            seed: 0,
            trials: None,
            output_dir: PathBuf::from("out"),
            emit: vec![EmitKind::Csv, EmitKind::Svg],
            pfa_total: None,
            k: None,
            k_values: None,
            m_grid: None,
            regimes: None,
        }
    }
}

fn map_config_error(e: serde_json::Error) -> Error {
    use serde_json::error::Category;
    match e.classify() {
        Category::Data => {
            // serde_json spells the offending key in backticks, for example
            // "unknown field `sigm`, expected one of ...".
            let message = e.to_string();
            let field = message.split('`').nth(1).unwrap_or("config").to_string();
            Error::validation(field, message)
        }
        _ => Error::Parse { line: e.line(), column: e.column(), message: e.to_string() },
    }
}

fn parse_emit_kinds(raw: &[String]) -> Result<Vec<EmitKind>> {
    let mut kinds = Vec::new();
    for item in raw {
        let kind = match item.trim() {
            "csv" => EmitKind::Csv,
            "svg" => EmitKind::Svg,
            other => {
                return Err(Error::validation(
                    "emit",
                    format!("unknown artifact kind `{other}`; expected csv or svg"),
                ))
            }
        };
        if !kinds.contains(&kind) {
            kinds.push(kind);
        }
    }
    if kinds.is_empty() {
        return Err(Error::validation("emit", "at least one artifact kind is required"));
    }
    Ok(kinds)
}

/// Parses and validates a config document. Malformed JSON reports the line
/// and column; well-formed JSON with an unknown or ill-typed key reports the
/// key by name.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let doc: ConfigDoc = serde_json::from_str(text).map_err(map_config_error)?;
    let defaults = Scenario::default();
    let scenario = Scenario {
        anchors: doc.anchors.unwrap_or(defaults.anchors),
        nodes: doc.nodes.unwrap_or(defaults.nodes),
        c: doc.c.unwrap_or(defaults.c),
        sigma: doc.sigma,
        m: doc.m.unwrap_or(defaults.m),
        snr_db_grid: doc.snr_db_grid.clone().unwrap_or_default(),
        dimension: doc.dimension.unwrap_or(defaults.dimension),
        n_samples: doc.n_samples.unwrap_or(defaults.n_samples),
        estimation_regime: doc.estimation_regime.unwrap_or(defaults.estimation_regime),
        detection_regime: doc.detection_regime.unwrap_or(defaults.detection_regime),
    };
    scenario.validate()?;

    if let Some(0) = doc.trials {
        return Err(Error::validation("trials", "trial count must be at least one"));
    }
    if let Some(p) = doc.pfa_total {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::validation(
                "pfa_total",
                format!("total false-alarm budget must sit inside (0, 1), got {p}"),
            ));
        }
    }
    let emit = match &doc.emit {
        Some(raw) => parse_emit_kinds(raw)?,
        None => vec![EmitKind::Csv, EmitKind::Svg],
    };

    Ok(RunConfig {
        scenario,
        snr_grid_given: doc.snr_db_grid.is_some(),
        seed: doc.seed.unwrap_or(0),
        trials: doc.trials.map(|t| t as usize),
        output_dir: doc.output_dir.unwrap_or_else(|| PathBuf::from("out")),
        emit,
        pfa_total: doc.pfa_total,
        k: doc.k,
        k_values: doc.k_values,
        m_grid: doc.m_grid,
        regimes: doc.regimes,
    })
}

impl RunConfig {
    /// Folds command-line flags over the document values.
    pub fn apply_flags(mut self, args: &RunArgs) -> Result<Self> {
        if let Some(seed) = args.seed {
            self.seed = seed;
        }
        if let Some(trials) = args.trials {
            if trials == 0 {
                return Err(Error::validation("trials", "trial count must be at least one"));
            }
            self.trials = Some(trials as usize);
        }
        if let Some(out) = &args.out {
            self.output_dir = out.clone();
        }
        if let Some(raw) = &args.emit {
            let items: Vec<String> = raw.split(',').map(str::to_string).collect();
            self.emit = parse_emit_kinds(&items)?;
        }
        Ok(self)
    }
}

/// Formats with twelve significant digits and no trailing zero noise, so
/// emitted tables are compact, deterministic, and round-trip stable.
fn fmt_sig(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let magnitude = x.abs().log10().floor() as i32;
    if (-4..12).contains(&magnitude) {
        let decimals = (11 - magnitude).max(0) as usize;
        trim_decimal(&format!("{x:.decimals$}"))
    } else {
        let formatted = format!("{x:.11e}");
        let (mantissa, exponent) = formatted.split_once('e').expect("e-notation has an exponent");
        format!("{}e{}", trim_decimal(mantissa), exponent)
    }
}

fn trim_decimal(s: &str) -> String {
    if !s.contains('.') {
        return s.to_string();
    }
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

/// Renders a result table as CSV: fixed header, rows sorted by series then
/// x, twelve significant digits, empty cells for the analytic rows' missing
/// interval and trial count, LF line endings, trailing newline.
pub fn emit_csv(result: &ExperimentResult) -> String {
    let mut rows: Vec<&ResultRow> = result.rows.iter().collect();
    rows.sort_by(|a, b| a.series.cmp(&b.series).then(a.x.total_cmp(&b.x)));
    let mut out = String::from("x,series,y,ci95,trials\n");
    for row in rows {
        let ci = row.ci95.map(fmt_sig).unwrap_or_default();
        let trials = row.trials.map(|t| t.to_string()).unwrap_or_default();
        let _ = writeln!(out, "{},{},{},{},{}", fmt_sig(row.x), row.series, fmt_sig(row.y), ci, trials);
    }
    out
}

/// Parses [`emit_csv`] output back into rows. The emitted digits identify
/// each value uniquely, so emit, parse, emit reproduces the bytes.
pub fn parse_csv(text: &str) -> Result<Vec<ResultRow>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, "x,series,y,ci95,trials")) => {}
        other => {
            return Err(Error::Parse {
                line: 1,
                column: 1,
                message: format!("expected the result-table header, got {:?}", other.map(|(_, l)| l)),
            })
        }
    }
    let mut rows = Vec::new();
    for (idx, line) in lines {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 5 {
            return Err(Error::Parse {
                line: idx + 1,
                column: 1,
                message: format!("expected 5 fields, got {}", fields.len()),
            });
        }
        let number = |column: usize| -> Result<f64> {
            fields[column].parse().map_err(|_| Error::Parse {
                line: idx + 1,
                column: column + 1,
                message: format!("not a number: {}", fields[column]),
            })
        };
        rows.push(ResultRow {
            x: number(0)?,
            series: fields[1].to_string(),
            y: number(2)?,
            ci95: if fields[3].is_empty() { None } else { Some(number(3)?) },
            trials: if fields[4].is_empty() {
                None
            } else {
                Some(fields[4].parse().map_err(|_| Error::Parse {
                    line: idx + 1,
                    column: 5,
                    message: format!("not a trial count: {}", fields[4]),
                })?)
            },
        });
    }
    Ok(rows)
}

/// Axis and labeling choices for one experiment's chart.
#[derive(Clone, Copy, Debug)]
pub struct PlotSpec {
    pub title: &'static str,
    pub x_label: &'static str,
    pub y_label: &'static str,
    pub log_x: bool,
    pub log_y: bool,
}

const PALETTE: [&str; 10] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf",
    "#bcbd22", "#7f7f7f",
];

const SVG_WIDTH: f64 = 880.0;
const SVG_HEIGHT: f64 = 540.0;
const MARGIN_LEFT: f64 = 78.0;
const MARGIN_RIGHT: f64 = 230.0;
const MARGIN_TOP: f64 = 46.0;
const MARGIN_BOTTOM: f64 = 58.0;

fn fmt_tick(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    let magnitude = x.abs().log10().floor() as i32;
    if (-3..5).contains(&magnitude) {
        let decimals = (2 - magnitude).max(0) as usize;
        trim_decimal(&format!("{x:.decimals$}"))
    } else {
        let formatted = format!("{x:.2e}");
        let (mantissa, exponent) = formatted.split_once('e').expect("e-notation has an exponent");
        format!("{}e{}", trim_decimal(mantissa), exponent)
    }
}

fn svg_coord(v: f64) -> String {
    format!("{v:.2}")
}

/// Renders a result table as a standalone SVG chart: one polyline per
/// series, point markers and interval whiskers on simulated series, a
/// legend, and log or linear axes per the plot spec. Pure text assembly, so
/// the bytes are a deterministic function of the result.
pub fn emit_svg(result: &ExperimentResult, plot: &PlotSpec) -> String {
    let mut series: BTreeMap<&str, Vec<&ResultRow>> = BTreeMap::new();
    for row in &result.rows {
        series.entry(&row.series).or_default().push(row);
    }
    for rows in series.values_mut() {
        rows.sort_by(|a, b| a.x.total_cmp(&b.x));
    }

    let tx = |x: f64| if plot.log_x { x.log10() } else { x };
    let ty = |y: f64| if plot.log_y { y.log10() } else { y };
    let usable = |v: f64, log: bool| v.is_finite() && (!log || v > 0.0);

    let mut x_min = f64::INFINITY;
    let mut x_max = f64::NEG_INFINITY;
    let mut y_min = f64::INFINITY;
    let mut y_max = f64::NEG_INFINITY;
    for rows in series.values() {
        for row in rows {
            if !(usable(row.x, plot.log_x) && usable(row.y, plot.log_y)) {
                continue;
            }
            x_min = x_min.min(tx(row.x));
            x_max = x_max.max(tx(row.x));
            let lo = row.y - row.ci95.unwrap_or(0.0);
            let hi = row.y + row.ci95.unwrap_or(0.0);
            y_min = y_min.min(ty(if usable(lo, plot.log_y) { lo } else { row.y }));
            y_max = y_max.max(ty(if usable(hi, plot.log_y) { hi } else { row.y }));
        }
    }
    if !(x_min.is_finite() && y_min.is_finite()) {
        x_min = 0.0;
        x_max = 1.0;
        y_min = 0.0;
        y_max = 1.0;
    }
    if x_max - x_min < 1e-12 {
        x_min -= 0.5;
        x_max += 0.5;
    }
    if y_max - y_min < 1e-12 {
        y_min -= 0.5;
        y_max += 0.5;
    }
    let x_pad = 0.04 * (x_max - x_min);
    let y_pad = 0.06 * (y_max - y_min);
    x_min -= x_pad;
    x_max += x_pad;
    y_min -= y_pad;
    y_max += y_pad;

    let plot_w = SVG_WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = SVG_HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let px = |x: f64| MARGIN_LEFT + (tx(x) - x_min) / (x_max - x_min) * plot_w;
    let py = |y: f64| SVG_HEIGHT - MARGIN_BOTTOM - (ty(y) - y_min) / (y_max - y_min) * plot_h;

    let mut svg = String::new();
    let _ = write!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {w} {h}" font-family="sans-serif">"#,
        w = SVG_WIDTH,
        h = SVG_HEIGHT
    );
    svg.push('\n');
    let _ = writeln!(svg, r#"<rect width="{SVG_WIDTH}" height="{SVG_HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="26" font-size="17" text-anchor="middle">{}</text>"#,
        svg_coord(MARGIN_LEFT + plot_w / 2.0),
        plot.title
    );

    // Gridlines and tick labels on five evenly spaced stops per axis.
    for i in 0..5 {
        let f = i as f64 / 4.0;
        let gx = MARGIN_LEFT + f * plot_w;
        let gy = SVG_HEIGHT - MARGIN_BOTTOM - f * plot_h;
        let x_value = x_min + f * (x_max - x_min);
        let y_value = y_min + f * (y_max - y_min);
        let x_label = fmt_tick(if plot.log_x { 10f64.powf(x_value) } else { x_value });
        let y_label = fmt_tick(if plot.log_y { 10f64.powf(y_value) } else { y_value });
        let _ = writeln!(
            svg,
            r##"<line x1="{x}" y1="{t}" x2="{x}" y2="{b}" stroke="#dddddd"/>"##,
            x = svg_coord(gx),
            t = svg_coord(MARGIN_TOP),
            b = svg_coord(SVG_HEIGHT - MARGIN_BOTTOM)
        );
        let _ = writeln!(
            svg,
            r##"<line x1="{l}" y1="{y}" x2="{r}" y2="{y}" stroke="#dddddd"/>"##,
            l = svg_coord(MARGIN_LEFT),
            r = svg_coord(MARGIN_LEFT + plot_w),
            y = svg_coord(gy)
        );
        let _ = writeln!(
            svg,
            r#"<text x="{x}" y="{y}" font-size="12" text-anchor="middle">{x_label}</text>"#,
            x = svg_coord(gx),
            y = svg_coord(SVG_HEIGHT - MARGIN_BOTTOM + 18.0)
        );
        let _ = writeln!(
            svg,
            r#"<text x="{x}" y="{y}" font-size="12" text-anchor="end">{y_label}</text>"#,
            x = svg_coord(MARGIN_LEFT - 8.0),
            y = svg_coord(gy + 4.0)
        );
    }
    let _ = writeln!(
        svg,
        r##"<rect x="{x}" y="{y}" width="{w}" height="{h}" fill="none" stroke="#333333"/>"##,
        x = svg_coord(MARGIN_LEFT),
        y = svg_coord(MARGIN_TOP),
        w = svg_coord(plot_w),
        h = svg_coord(plot_h)
    );
    let _ = writeln!(
        svg,
        r#"<text x="{x}" y="{y}" font-size="13" text-anchor="middle">{label}</text>"#,
        x = svg_coord(MARGIN_LEFT + plot_w / 2.0),
        y = svg_coord(SVG_HEIGHT - 14.0),
        label = plot.x_label
    );
    let _ = writeln!(
        svg,
        r#"<text x="18" y="{y}" font-size="13" text-anchor="middle" transform="rotate(-90 18 {y})">{label}</text>"#,
        y = svg_coord(MARGIN_TOP + plot_h / 2.0),
        label = plot.y_label
    );

    for (index, (name, rows)) in series.iter().enumerate() {
        let color = PALETTE[index % PALETTE.len()];
        let simulated = rows.iter().any(|r| r.ci95.is_some());

        let points: Vec<String> = rows
            .iter()
            .filter(|r| usable(r.x, plot.log_x) && usable(r.y, plot.log_y))
            .map(|r| format!("{},{}", svg_coord(px(r.x)), svg_coord(py(r.y))))
            .collect();
        if points.len() > 1 {
            let dash = if simulated { r#" stroke-dasharray="5,3""# } else { "" };
            let _ = writeln!(
                svg,
                r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.6"{dash}/>"#,
                points.join(" ")
            );
        }
        for row in rows {
            if !(usable(row.x, plot.log_x) && usable(row.y, plot.log_y)) {
                continue;
            }
            if let Some(ci) = row.ci95 {
                let _ = writeln!(
                    svg,
                    r#"<circle cx="{x}" cy="{y}" r="2.6" fill="{color}"/>"#,
                    x = svg_coord(px(row.x)),
                    y = svg_coord(py(row.y))
                );
                let lo = row.y - ci;
                let hi = row.y + ci;
                if ci > 0.0 && usable(lo, plot.log_y) && usable(hi, plot.log_y) {
                    let x = px(row.x);
                    let _ = writeln!(
                        svg,
                        r#"<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" stroke="{color}"/>"#,
                        x0 = svg_coord(x),
                        y0 = svg_coord(py(lo)),
                        y1 = svg_coord(py(hi))
                    );
                    for end in [lo, hi] {
                        let _ = writeln!(
                            svg,
                            r#"<line x1="{x0}" y1="{y}" x2="{x1}" y2="{y}" stroke="{color}"/>"#,
                            x0 = svg_coord(x - 3.0),
                            x1 = svg_coord(x + 3.0),
                            y = svg_coord(py(end))
                        );
                    }
                }
            }
        }

        let legend_y = MARGIN_TOP + 16.0 * index as f64 + 10.0;
        let legend_x = SVG_WIDTH - MARGIN_RIGHT + 12.0;
        let _ = writeln!(
            svg,
            r#"<line x1="{x0}" y1="{y}" x2="{x1}" y2="{y}" stroke="{color}" stroke-width="2"/>"#,
            x0 = svg_coord(legend_x),
            x1 = svg_coord(legend_x + 22.0),
            y = svg_coord(legend_y - 4.0)
        );
        let _ = writeln!(
            svg,
            r#"<text x="{x}" y="{y}" font-size="11">{name}</text>"#,
            x = svg_coord(legend_x + 28.0),
            y = svg_coord(legend_y)
        );
    }

    svg.push_str("</svg>\n");
    svg
}

/// One output file, assembled in memory before anything touches the disk.
#[derive(Clone, Debug, PartialEq)]
pub struct Artifact {
    pub filename: String,
    pub contents: String,
}

fn artifacts_for(
    experiment: Experiment,
    stem: &str,
    result: &ExperimentResult,
    emit: &[EmitKind],
) -> Vec<Artifact> {
    let mut out = Vec::new();
    for kind in emit {
        match kind {
            EmitKind::Csv => out.push(Artifact {
                filename: format!("{stem}.csv"),
                contents: emit_csv(result),
            }),
            EmitKind::Svg => out.push(Artifact {
                filename: format!("{stem}.svg"),
                contents: emit_svg(result, &experiment.plot()),
            }),
        }
    }
    out
}

fn default_snr_grid(experiment: Experiment) -> Vec<f64> {
    match experiment {
        Experiment::CrlbSweep => (0..=10).map(|i| -40.0 + 2.0 * i as f64).collect(),
        Experiment::MleCompare => vec![20.0, 22.0, 24.0, 26.0, 28.0, 30.0],
        Experiment::Roc | Experiment::CentralVsDist => vec![15.0],
        Experiment::KSweep => vec![5.0, 10.0],
        Experiment::PdVsSnr => (0..=13).map(|i| -10.0 + 2.0 * i as f64).collect(),
        Experiment::KRatio => Vec::new(),
    }
}

fn default_m_grid() -> Vec<f64> {
    vec![0.5, 0.75, 1.0, 1.5, 2.0, 3.0, 4.0, 6.0, 8.0, 12.0, 16.0, 32.0, 64.0]
}

fn db_tag(db: f64) -> String {
    let text = fmt_sig(db).replace('-', "m").replace('.', "p");
    format!("{text}db")
}

/// Runs one experiment with its recipe defaults folded over the config, and
/// returns the artifacts to write.
pub fn execute(experiment: Experiment, config: &RunConfig) -> Result<Vec<Artifact>> {
    let mut scenario = config.scenario.clone();
    if !config.snr_grid_given {
        scenario.snr_db_grid = default_snr_grid(experiment);
    }
    let trials = |floor: usize| config.trials.unwrap_or(floor);

    match experiment {
        Experiment::CrlbSweep => {
            if scenario.snr_db_grid.is_empty() && scenario.sigma.is_none() {
                scenario.snr_db_grid = default_snr_grid(experiment);
            }
            let result = simkit::run_crlb_sweep(&scenario)?;
            Ok(artifacts_for(experiment, experiment.slug(), &result, &config.emit))
        }
        Experiment::KRatio => {
            let grid = config.m_grid.clone().unwrap_or_else(default_m_grid);
            let result = simkit::run_k_ratio_curve(&grid)?;
            Ok(artifacts_for(experiment, experiment.slug(), &result, &config.emit))
        }
        Experiment::MleCompare => {
            let result = simkit::run_mle_comparison(&scenario, trials(10_000), config.seed)?;
            Ok(artifacts_for(experiment, experiment.slug(), &result, &config.emit))
        }
        Experiment::Roc => {
            let regimes = config.regimes.clone().unwrap_or_else(|| {
                vec![
                    DetectorRegime::CoherentKnownH,
                    DetectorRegime::RayleighMarginal,
                    DetectorRegime::NoCsiQuadratic,
                ]
            });
            let k_values = config.k_values.clone().unwrap_or_else(|| vec![1]);
            let result =
                simkit::run_roc(&scenario, &regimes, &k_values, trials(100_000), config.seed)?;
            Ok(artifacts_for(experiment, experiment.slug(), &result, &config.emit))
        }
        Experiment::KSweep => {
            let regimes = config
                .regimes
                .clone()
                .unwrap_or_else(|| vec![DetectorRegime::RayleighMarginal]);
            let k_values = config.k_values.clone().unwrap_or_else(|| vec![1, 2, 3, 4]);
            let mut artifacts = Vec::new();
            for &db in &scenario.snr_db_grid.clone() {
                let point = Scenario { snr_db_grid: vec![db], ..scenario.clone() };
                let result =
                    simkit::run_roc(&point, &regimes, &k_values, trials(100_000), config.seed)?;
                let stem = format!("{}_{}", experiment.slug(), db_tag(db));
                artifacts.extend(artifacts_for(experiment, &stem, &result, &config.emit));
            }
            if artifacts.is_empty() {
                return Err(Error::validation(
                    "snr_db_grid",
                    "the counting-threshold sweep needs at least one SNR point",
                ));
            }
            Ok(artifacts)
        }
        Experiment::PdVsSnr => {
            let result =
                simkit::run_pd_vs_snr(&scenario, config.pfa_total.unwrap_or(0.1), config.k.unwrap_or(1))?;
            Ok(artifacts_for(experiment, experiment.slug(), &result, &config.emit))
        }
        Experiment::CentralVsDist => {
            let result = simkit::run_centralized_vs_distributed(
                &scenario,
                config.k.unwrap_or(4),
                trials(100_000),
                config.seed,
            )?;
            Ok(artifacts_for(experiment, experiment.slug(), &result, &config.emit))
        }
    }
}

/// Writes every artifact under the output directory through temporary
/// files, renaming only after all of them are staged, so an interrupted or
/// failing run leaves no partial artifact behind.
pub fn write_artifacts(output_dir: &Path, artifacts: &[Artifact]) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(output_dir)?;
    let mut staged: Vec<(PathBuf, PathBuf)> = Vec::new();
    let clean = |staged: &[(PathBuf, PathBuf)]| {
        for (tmp, _) in staged {
            let _ = std::fs::remove_file(tmp);
        }
    };
    for artifact in artifacts {
        let target = output_dir.join(&artifact.filename);
        let tmp = output_dir.join(format!(".{}.tmp", artifact.filename));
        if let Err(e) = std::fs::write(&tmp, artifact.contents.as_bytes()) {
            clean(&staged);
            return Err(e.into());
        }
        staged.push((tmp, target));
    }
    let mut written = Vec::new();
    for (index, (tmp, target)) in staged.iter().enumerate() {
        if let Err(e) = std::fs::rename(tmp, target) {
            clean(&staged[index..]);
            return Err(e.into());
        }
        written.push(target.clone());
    }
    Ok(written)
}

/// Exit code contract: 0 success, 2 config problems, 3 numeric
/// non-convergence, 1 everything else (chiefly output io).
pub fn exit_code(error: &Error) -> i32 {
    match error {
        Error::Parse { .. }
        | Error::Validation { .. }
        | Error::Domain { .. }
        | Error::UnsupportedRegime { .. }
        | Error::Infeasible { .. }
        | Error::SingularGeometry { .. } => 2,
        Error::Convergence { .. } => 3,
        Error::DegenerateChannel { .. } | Error::Io(_) => 1,
    }
}

fn load_config(args: &RunArgs) -> Result<RunConfig> {
    let base = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| {
                Error::validation("config", format!("cannot read {}: {e}", path.display()))
            })?;
            parse_config(&text)?
        }
        None => RunConfig::default(),
    };
    base.apply_flags(args)
}

fn run_experiments(experiments: &[Experiment], args: &RunArgs) -> Result<()> {
    let config = load_config(args)?;
    let mut artifacts = Vec::new();
    for &experiment in experiments {
        artifacts.extend(execute(experiment, &config)?);
    }
    let written = write_artifacts(&config.output_dir, &artifacts)?;
    for path in written {
        println!("wrote {}", path.display());
    }
    Ok(())
}

/// Dispatches a parsed command line and reports the process exit code.
pub fn run(cli: Cli) -> i32 {
    let outcome = match &cli.command {
        Command::CrlbSweep(args) => run_experiments(&[Experiment::CrlbSweep], args),
        Command::KRatio(args) => run_experiments(&[Experiment::KRatio], args),
        Command::MleCompare(args) => run_experiments(&[Experiment::MleCompare], args),
        Command::Roc(args) => run_experiments(&[Experiment::Roc], args),
        Command::KSweep(args) => run_experiments(&[Experiment::KSweep], args),
        Command::PdVsSnr(args) => run_experiments(&[Experiment::PdVsSnr], args),
        Command::CentralVsDist(args) => run_experiments(&[Experiment::CentralVsDist], args),
        Command::ReproAll(args) => {
            if args.config.is_some() {
                Err(Error::validation(
                    "config",
                    "repro-all runs the default recipes; pass --config to individual experiments instead",
                ))
            } else {
                run_experiments(&Experiment::ALL, args)
            }
        }
    };
    match outcome {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_result() -> ExperimentResult {
        ExperimentResult {
            rows: vec![
                ResultRow {
                    x: 2.0,
                    series: "beta".to_string(),
                    y: 0.125,
                    ci95: Some(0.5e-3),
                    trials: Some(1000),
                },
                ResultRow {
                    x: 1.0,
                    series: "beta".to_string(),
                    y: 1.0 / 3.0,
                    ci95: Some(1.25e-3),
                    trials: Some(1000),
                },
                ResultRow { x: 1.0, series: "alpha".to_string(), y: 4.0, ci95: None, trials: None },
            ],
            seed: 7,
            config_hash: "feedface".to_string(),
        }
    }

    #[test]
    fn significant_digit_formatting_is_compact_and_unambiguous() {
        assert_eq!(fmt_sig(0.0), "0");
        assert_eq!(fmt_sig(0.25), "0.25");
        assert_eq!(fmt_sig(4.0), "4");
        assert_eq!(fmt_sig(-38.0), "-38");
        assert_eq!(fmt_sig(1e-6), "1e-6");
        assert_eq!(fmt_sig(std::f64::consts::PI), "3.14159265359");
        assert_eq!(fmt_sig(1.0 / 3.0), "0.333333333333");
        assert_eq!(fmt_sig(10.0 / 3.0), "3.33333333333");
        assert_eq!(fmt_sig(1.5e14), "1.5e14");
        assert_eq!(fmt_sig(-2.5e-7), "-2.5e-7");

        for &x in &[0.1, 3.0e8, 1.0 / 7.0, 9.80665, 2.0f64.powi(-30), 6.02214076e23] {
            let printed = fmt_sig(x);
            let reparsed: f64 = printed.parse().expect("formatted numbers parse");
            assert_eq!(fmt_sig(reparsed), printed, "formatting must be stable for {x}");
        }
    }

    #[test]
    fn csv_is_sorted_padded_and_round_trip_stable() {
        let result = sample_result();
        let csv = emit_csv(&result);
        let expected = "x,series,y,ci95,trials\n\
                        1,alpha,4,,\n\
                        1,beta,0.333333333333,0.00125,1000\n\
                        2,beta,0.125,0.0005,1000\n";
        assert_eq!(csv, expected, "rows sort by series then x, with empty analytic cells");

        let rows = parse_csv(&csv).expect("own output parses");
        assert_eq!(rows.len(), 3);
        let again = emit_csv(&ExperimentResult {
            rows,
            seed: result.seed,
            config_hash: result.config_hash.clone(),
        });
        assert_eq!(again, csv, "emit, parse, emit must reproduce the bytes");
    }

    #[test]
    fn empty_result_yields_header_only() {
        let empty = ExperimentResult { rows: vec![], seed: 0, config_hash: String::new() };
        assert_eq!(emit_csv(&empty), "x,series,y,ci95,trials\n");
        assert!(parse_csv("x,series,y,ci95,trials\n").expect("header only").is_empty());
        assert!(parse_csv("nope\n").is_err(), "a foreign header must be rejected");
    }

    #[test]
    fn config_defaults_match_the_scenario_defaults() {
        let config = parse_config("{}").expect("empty document");
        assert_eq!(config.scenario, Scenario::default());
        assert_eq!(config.seed, 0);
        assert_eq!(config.output_dir, PathBuf::from("out"));
        assert_eq!(config.emit, vec![EmitKind::Csv, EmitKind::Svg]);
        assert!(!config.snr_grid_given);

        let full = parse_config(
            r#"{
                "anchors": [[0,0],[2,0],[2,2],[0,2]],
                "nodes": [[1.0, 0.5]],
                "m": 2.0,
                "snr_db_grid": [1, 2, 3],
                "seed": 9,
                "trials": 12345,
                "emit": ["csv"],
                "detection_regime": "rayleigh-marginal"
            }"#,
        )
        .expect("full document");
        assert_eq!(full.scenario.anchors[1], [2.0, 0.0]);
        assert_eq!(full.scenario.m, 2.0);
        assert!(full.snr_grid_given);
        assert_eq!(full.seed, 9);
        assert_eq!(full.trials, Some(12345));
        assert_eq!(full.emit, vec![EmitKind::Csv]);
        assert_eq!(full.scenario.detection_regime, DetectorRegime::RayleighMarginal);
    }

    #[test]
    fn config_errors_name_the_offense() {
        let typo = parse_config(r#"{"sigm": 0.5}"#).expect_err("unknown key");
        match &typo {
            Error::Validation { field, .. } => {
                assert_eq!(field, "sigm", "the misspelled key must be named")
            }
            other => panic!("expected a validation error, got {other:?}"),
        }
        assert_eq!(exit_code(&typo), 2);

        let broken = parse_config("{\n  \"seed\": ,\n}").expect_err("syntax error");
        match &broken {
            Error::Parse { line, column, .. } => {
                assert_eq!(*line, 2, "line of the dangling comma");
                assert!(*column > 0);
            }
            other => panic!("expected a parse error, got {other:?}"),
        }
        assert_eq!(exit_code(&broken), 2);

        let empty_anchors = parse_config(r#"{"anchors": []}"#).expect_err("empty anchors");
        match &empty_anchors {
            Error::Validation { field, .. } => assert_eq!(field, "anchors"),
            other => panic!("expected a validation error, got {other:?}"),
        }

        let zero_trials = parse_config(r#"{"trials": 0}"#).expect_err("zero trials");
        match &zero_trials {
            Error::Validation { field, .. } => assert_eq!(field, "trials"),
            other => panic!("expected a validation error, got {other:?}"),
        }

        let bad_emit = parse_config(r#"{"emit": ["csv", "pdf"]}"#).expect_err("unknown kind");
        assert!(bad_emit.to_string().contains("pdf"));
    }

    #[test]
    fn flags_override_document_values() {
        let config = parse_config(r#"{"seed": 1, "trials": 5000, "output_dir": "doc"}"#)
            .expect("document");
        let args = RunArgs {
            config: None,
            seed: Some(42),
            trials: Some(7000),
            out: Some(PathBuf::from("flag")),
            emit: Some("svg".to_string()),
        };
        let merged = config.apply_flags(&args).expect("merge");
        assert_eq!(merged.seed, 42);
        assert_eq!(merged.trials, Some(7000));
        assert_eq!(merged.output_dir, PathBuf::from("flag"));
        assert_eq!(merged.emit, vec![EmitKind::Svg]);

        let zero = RunArgs { trials: Some(0), ..Default::default() };
        assert!(RunConfig::default().apply_flags(&zero).is_err(), "zero trials is invalid");
    }

    #[test]
    fn exit_codes_follow_the_error_family() {
        assert_eq!(exit_code(&Error::domain("x")), 2);
        assert_eq!(exit_code(&Error::validation("f", "m")), 2);
        assert_eq!(exit_code(&Error::unsupported_regime("r")), 2);
        assert_eq!(exit_code(&Error::convergence("slow", None)), 3);
        assert_eq!(
            exit_code(&Error::Io(std::io::Error::other("disk"))),
            1
        );
    }

    #[test]
    fn svg_is_deterministic_and_carries_every_series() {
        let result = sample_result();
        let plot = Experiment::CrlbSweep.plot();
        let svg = emit_svg(&result, &plot);
        assert_eq!(svg, emit_svg(&result, &plot), "same input must give identical bytes");
        assert!(svg.starts_with("<svg "), "standalone svg root");
        assert!(svg.ends_with("</svg>\n"));
        assert!(svg.contains(">alpha</text>"), "legend lists each series");
        assert!(svg.contains(">beta</text>"));
        assert!(svg.contains("polyline"), "series are drawn as polylines");
        assert!(svg.contains("circle"), "simulated points carry markers");
        assert!(svg.contains(plot.y_label), "axis labels are rendered");
        assert!(!svg.contains("http://") || svg.matches("http://").count() == 1,
            "the only external token is the svg namespace");
    }

    #[test]
    fn svg_skips_whiskers_that_would_leave_a_log_axis() {
        // A simulated rate of zero cannot be drawn at log scale; the point
        // and its interval are dropped rather than emitting a NaN position.
        let result = ExperimentResult {
            rows: vec![
                ResultRow { x: 1.0, series: "s".into(), y: 0.0, ci95: Some(0.1), trials: Some(10) },
                ResultRow { x: 2.0, series: "s".into(), y: 1.0, ci95: Some(0.1), trials: Some(10) },
                ResultRow { x: 3.0, series: "s".into(), y: 2.0, ci95: Some(0.1), trials: Some(10) },
            ],
            seed: 0,
            config_hash: String::new(),
        };
        let plot = PlotSpec {
            title: "t",
            x_label: "x",
            y_label: "y",
            log_x: false,
            log_y: true,
        };
        let svg = emit_svg(&result, &plot);
        assert!(!svg.contains("NaN"), "no unplottable coordinates may leak");
        assert_eq!(svg.matches("<circle").count(), 2, "the zero row is dropped");
    }

    #[test]
    fn recipes_fill_defaults_that_configs_and_flags_can_replace() {
        let config = RunConfig::default();
        let artifacts = execute(Experiment::KRatio, &config).expect("k-ratio recipe");
        assert_eq!(artifacts.len(), 2, "csv and svg by default");
        assert_eq!(artifacts[0].filename, "k_ratio.csv");
        assert_eq!(artifacts[1].filename, "k_ratio.svg");
        let rows = parse_csv(&artifacts[0].contents).expect("table parses");
        assert!(
            rows.iter().any(|r| r.series == "k-ratio" && r.x == 1.0),
            "default shape grid passes through the Rayleigh point"
        );

        let csv_only = RunConfig { emit: vec![EmitKind::Csv], ..RunConfig::default() };
        let artifacts = execute(Experiment::CrlbSweep, &csv_only).expect("sweep recipe");
        assert_eq!(artifacts.len(), 1);
        let rows = parse_csv(&artifacts[0].contents).expect("table parses");
        assert!(
            rows.iter().all(|r| (-40.0..=-20.0).contains(&r.x)),
            "default sweep grid spans the small-distance regime"
        );
    }

    #[test]
    fn db_tags_are_filename_safe() {
        assert_eq!(db_tag(5.0), "5db");
        assert_eq!(db_tag(10.0), "10db");
        assert_eq!(db_tag(-2.5), "m2p5db");
    }

    #[test]
    fn artifact_writes_are_atomic_per_run() {
        let dir = tempfile::tempdir().expect("tempdir");
        let artifacts = vec![
            Artifact { filename: "a.csv".to_string(), contents: "x\n".to_string() },
            Artifact { filename: "b.csv".to_string(), contents: "y\n".to_string() },
        ];
        let written = write_artifacts(dir.path(), &artifacts).expect("write");
        assert_eq!(written.len(), 2);
        assert_eq!(std::fs::read_to_string(dir.path().join("a.csv")).expect("a"), "x\n");
        let leftovers: Vec<_> = std::fs::read_dir(dir.path())
            .expect("dir")
            .filter_map(|e| e.ok())
            .filter(|e| e.file_name().to_string_lossy().ends_with(".tmp"))
            .collect();
        assert!(leftovers.is_empty(), "no temporary files survive a successful run");
    }
}
