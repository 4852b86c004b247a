//! Scenario configuration, entropy sweeps over collection time, checks of
//! the entropy relations, and table/plot output.

use std::fmt::{self, Write as _};
use std::fs;
use std::path::{Path, PathBuf};

use crate::collision::{compare_covariances, simulate_windowed, CollisionConfig};
use crate::dynamics::{initial_covariance, resonator_covariance, InitialState, ModelKind, RateParams};
use crate::error::{Error, Result};
use crate::gaussian::{
    entropy, entropy_from_spectrum, extract_subsystem, williamson_spectrum, CovarianceMatrix,
    VALIDITY_TOL,
};
use crate::modes::{
    assemble_checked, AssemblyOptions, Selection, SubsystemSpec, WindowBasis, DEFAULT_K_MAX,
};

/// The long-time limit row is evaluated at this many decay times.
pub const LIMIT_RATE_TIME: f64 = 20.0;

pub const DEFAULT_RELATION_TOL: f64 = 1e-3;

/// Header of the entropy table.
pub const TABLE_HEADER: &str =
    "t,t0,S_A_t,S_A_t0,S_B1,S_B2,S_B1B2,S_B2A,S_B1B2A,R3,R4,R5,Riv,SSA_slack";

#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioConfig {
    pub model: ModelKind,
    pub gamma: f64,
    pub r: f64,
    pub n_th: f64,
    pub t0_list: Vec<f64>,
    pub t_grid: Vec<f64>,
    pub k_max: usize,
    pub oracle_dt: Option<f64>,
    pub relation_tol: f64,
    pub validity_tol: f64,
}

impl ScenarioConfig {
    /// Defaults for `model`: the split times and grids of the reference
    /// decay and amplifier runs, vacuum initial state.
    pub fn defaults(model: ModelKind) -> Self {
        let (t0_list, t_grid) = match model {
            ModelKind::Decay => (vec![1.5, 3.0, 7.5], range_grid(0.5, 12.0, 0.5)),
            ModelKind::Amplifier => (vec![2.0, 5.5], range_grid(0.5, 8.0, 0.5)),
        };
        Self {
            model,
            gamma: 1.0,
            r: 0.0,
            n_th: 0.0,
            t0_list,
            t_grid,
            k_max: DEFAULT_K_MAX,
            oracle_dt: None,
            relation_tol: DEFAULT_RELATION_TOL,
            validity_tol: VALIDITY_TOL,
        }
    }

    pub fn params(&self) -> Result<RateParams> {
        RateParams::new(self.gamma)
    }

    pub fn initial_state(&self) -> Result<InitialState> {
        InitialState::new(self.r, self.n_th)
    }

    /// Pure decay is the only case where the old-plus-new radiation tracks
    /// the resonator entropy at all times.
    pub fn tracks_resonator(&self) -> bool {
        self.model == ModelKind::Decay && self.n_th == 0.0
    }

    /// Time of the long-time limit row, if the model has one.
    pub fn limit_time(&self) -> Option<f64> {
        (self.model == ModelKind::Decay).then(|| LIMIT_RATE_TIME / self.gamma)
    }
}

/// `start, start + step, …` up to and including `stop`.
fn range_grid(start: f64, stop: f64, step: f64) -> Vec<f64> {
    let n = ((stop - start) / step + 1e-9).floor() as usize;
    (0..=n)
        .map(|i| ((start + i as f64 * step) * 1e12).round() / 1e12)
        .collect()
}

fn parse_error(line: usize, key: &str, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        key: key.to_string(),
        message: message.into(),
    }
}

fn parse_f64(line: usize, key: &str, value: &str) -> Result<f64> {
    let v: f64 = value
        .parse()
        .map_err(|_| parse_error(line, key, format!("`{value}` is not a number")))?;
    if !v.is_finite() {
        return Err(parse_error(line, key, "value must be finite"));
    }
    Ok(v)
}

fn parse_list(line: usize, key: &str, value: &str) -> Result<Vec<f64>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse_f64(line, key, s))
        .collect()
}

fn parse_grid(line: usize, key: &str, value: &str) -> Result<Vec<f64>> {
    if !value.contains(':') {
        return parse_list(line, key, value);
    }
    let parts: Vec<&str> = value.split(':').map(str::trim).collect();
    let [start, stop, step] = parts[..] else {
        return Err(parse_error(line, key, "expected start:stop:step"));
    };
    let (start, stop, step) = (
        parse_f64(line, key, start)?,
        parse_f64(line, key, stop)?,
        parse_f64(line, key, step)?,
    );
    if step <= 0.0 || stop < start {
        return Err(parse_error(line, key, "need step > 0 and stop ≥ start"));
    }
    Ok(range_grid(start, stop, step))
}

fn positive(line: usize, key: &str, v: f64) -> Result<f64> {
    if v > 0.0 {
        Ok(v)
    } else {
        Err(parse_error(line, key, format!("must be positive, got {v}")))
    }
}

/// Parses flat `key=value` lines; `#` starts a comment. Absent keys take
/// the defaults of [`ScenarioConfig::defaults`] for the given model.
pub fn parse_config(text: &str) -> Result<ScenarioConfig> {
    let mut entries: Vec<(usize, String, String)> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            return Err(parse_error(line, content, "expected key=value"));
        };
        let key = key.trim().to_string();
        if entries.iter().any(|(_, k, _)| *k == key) {
            return Err(parse_error(line, &key, "key given twice"));
        }
        entries.push((line, key, value.trim().to_string()));
    }

    let model_entry = entries.iter().find(|(_, k, _)| k == "model");
    let Some((line, _, value)) = model_entry else {
        return Err(parse_error(0, "model", "model is required"));
    };
    let model: ModelKind = value
        .parse()
        .map_err(|_| parse_error(*line, "model", format!("unknown model `{value}`")))?;
    let mut config = ScenarioConfig::defaults(model);
    let mut lines = std::collections::HashMap::new();

    for (line, key, value) in &entries {
        let (line, value) = (*line, value.as_str());
        lines.insert(key.as_str(), line);
        match key.as_str() {
            "model" => {}
            "gamma" => config.gamma = positive(line, key, parse_f64(line, key, value)?)?,
            "r" => config.r = parse_f64(line, key, value)?,
            "n_th" => {
                let v = parse_f64(line, key, value)?;
                if v < 0.0 {
                    return Err(parse_error(line, key, "population must be ≥ 0"));
                }
                config.n_th = v;
            }
            "t0_list" => config.t0_list = parse_list(line, key, value)?,
            "t_grid" => config.t_grid = parse_grid(line, key, value)?,
            "k_max" => {
                let k: usize = value
                    .parse()
                    .map_err(|_| parse_error(line, key, format!("`{value}` is not an integer")))?;
                if k < 1 {
                    return Err(parse_error(line, key, "k_max must be at least 1"));
                }
                config.k_max = k;
            }
            "oracle_dt" => config.oracle_dt = Some(positive(line, key, parse_f64(line, key, value)?)?),
            "relation_tol" => config.relation_tol = positive(line, key, parse_f64(line, key, value)?)?,
            "validity_tol" => config.validity_tol = positive(line, key, parse_f64(line, key, value)?)?,
            other => return Err(parse_error(line, other, "unknown key")),
        }
    }

    let line_of = |key: &str| lines.get(key).copied().unwrap_or(0);
    if config.t_grid.is_empty() {
        return Err(parse_error(line_of("t_grid"), "t_grid", "grid is empty"));
    }
    if config.t_grid.windows(2).any(|w| w[1] <= w[0]) || config.t_grid[0] <= 0.0 {
        return Err(parse_error(
            line_of("t_grid"),
            "t_grid",
            "times must be positive and strictly increasing",
        ));
    }
    let t_max = *config.t_grid.last().unwrap_or(&0.0);
    if config.t0_list.is_empty() {
        return Err(parse_error(line_of("t0_list"), "t0_list", "no split times"));
    }
    if let Some(bad) = config.t0_list.iter().find(|&&t0| t0 <= 0.0 || t0 >= t_max) {
        return Err(parse_error(
            line_of("t0_list"),
            "t0_list",
            format!("split time {bad} must lie in (0, {t_max})"),
        ));
    }
    Ok(config)
}

/// Entropies (in nats) and relation residuals at one `(t, t0)` point.
#[derive(Clone, Debug, PartialEq)]
pub struct EntropyRow {
    pub t: f64,
    pub t0: f64,
    pub s_a_t: f64,
    pub s_a_t0: f64,
    pub s_b1: f64,
    pub s_b2: f64,
    pub s_b1b2: f64,
    pub s_b2a: f64,
    pub s_b1b2a: f64,
    /// `|S_B2A − S_A(t0)|`
    pub r3: f64,
    /// `|S_B1B2 − S_A(t)|`
    pub r4: f64,
    /// `|S_B1B2 − S_A(0)|`, the long-time relation when `limit` is set
    pub r5: f64,
    /// `|S_B1B2A − S_A(0)|`
    pub riv: f64,
    /// `S_B1B2 + S_B2A − S_B2 − S_B1B2A`
    pub ssa_slack: f64,
    /// Whether this is the long-time limit row.
    pub limit: bool,
    /// Smallest symplectic eigenvalue over all subsystems at this point.
    pub min_symplectic: f64,
    /// Largest number of symplectic eigenvalues above `1 + validity_tol`
    /// in any subsystem at this point.
    pub max_excited: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EntropyReport {
    pub model: ModelKind,
    /// `S_A(0)`
    pub initial_entropy: f64,
    pub rows: Vec<EntropyRow>,
}

/// Mode indices of each subsystem inside a `B1B2A` covariance with
/// `n` modes per window.
fn subsystem_modes(selection: Selection, n: usize) -> Vec<usize> {
    let mut modes = Vec::new();
    if selection.b1 {
        modes.extend(0..n);
    }
    if selection.b2 {
        modes.extend(n..2 * n);
    }
    if selection.a {
        modes.push(2 * n);
    }
    modes
}

struct SubsystemEntropy {
    entropy: f64,
    min: f64,
    excited: usize,
}

fn subsystem_entropy(
    full: &CovarianceMatrix,
    selection: Selection,
    n: usize,
    tol: f64,
    context: impl Fn() -> String,
) -> Result<SubsystemEntropy> {
    let sub = extract_subsystem(full, &subsystem_modes(selection, n))?;
    let spectrum = williamson_spectrum(&sub)?;
    if spectrum.min() < 1.0 - tol {
        return Err(Error::Inconsistent {
            context: format!("{selection} {}", context()),
            min_eigenvalue: spectrum.min(),
        });
    }
    Ok(SubsystemEntropy {
        entropy: entropy_from_spectrum(&spectrum, tol)?,
        min: spectrum.min(),
        excited: spectrum.count_above(1.0 + tol),
    })
}

/// Sweeps every `(t, t0)` with `t0 < t`, plus the long-time row for the
/// decay model. Each point assembles the `B1B2A` covariance once and reads
/// the other subsystems off as principal sub-blocks.
pub fn run_entropy_sweep(config: &ScenarioConfig) -> Result<EntropyReport> {
    let params = config.params()?;
    let sigma0 = initial_covariance(&config.initial_state()?);
    let model = config.model;
    let tol = config.validity_tol;
    let s_a = |t: f64| -> Result<f64> {
        entropy(&resonator_covariance(model, &sigma0, &params, t)?, tol)
    };
    let initial_entropy = entropy(&sigma0, tol)?;
    let options = AssemblyOptions {
        k_max: config.k_max,
        validity_tol: tol,
        ..AssemblyOptions::default()
    };
    let n = config.k_max + 1;

    let mut rows = Vec::new();
    for &t0 in &config.t0_list {
        let mut times: Vec<(f64, bool)> = config
            .t_grid
            .iter()
            .filter(|&&t| t > t0)
            .map(|&t| (t, false))
            .collect();
        if let Some(limit) = config.limit_time() {
            times.push((limit, true));
        }
        let s_a_t0 = s_a(t0)?;
        let mut b1: Option<SubsystemEntropy> = None;
        for (t, limit) in times {
            let spec = SubsystemSpec::new(Selection::B1B2A, t0, t)?;
            let full = assemble_checked(model, &sigma0, &params, &spec, &options)?;
            let context = || format!("({model}, t0 = {t0}, t = {t})");
            let b1_entry = match b1.take() {
                Some(e) => e,
                None => subsystem_entropy(&full.covariance, Selection::B1, n, tol, context)?,
            };
            let parts = [Selection::B2, Selection::B1B2, Selection::B2A]
                .into_iter()
                .map(|sel| subsystem_entropy(&full.covariance, sel, n, tol, context))
                .collect::<Result<Vec<_>>>()?;
            let whole = SubsystemEntropy {
                entropy: entropy_from_spectrum(&full.spectrum, tol)?,
                min: full.spectrum.min(),
                excited: full.spectrum.count_above(1.0 + tol),
            };
            let [b2, b1b2, b2a] = [&parts[0], &parts[1], &parts[2]];
            let s_a_t = s_a(t)?;
            let min_symplectic = parts
                .iter()
                .chain([&b1_entry, &whole])
                .map(|e| e.min)
                .fold(f64::INFINITY, f64::min);
            let max_excited = parts
                .iter()
                .chain([&b1_entry, &whole])
                .map(|e| e.excited)
                .max()
                .unwrap_or(0);
            rows.push(EntropyRow {
                t,
                t0,
                s_a_t,
                s_a_t0,
                s_b1: b1_entry.entropy,
                s_b2: b2.entropy,
                s_b1b2: b1b2.entropy,
                s_b2a: b2a.entropy,
                s_b1b2a: whole.entropy,
                r3: (b2a.entropy - s_a_t0).abs(),
                r4: (b1b2.entropy - s_a_t).abs(),
                r5: (b1b2.entropy - initial_entropy).abs(),
                riv: (whole.entropy - initial_entropy).abs(),
                ssa_slack: b1b2.entropy + b2a.entropy - b2.entropy - whole.entropy,
                limit,
                min_symplectic,
                max_excited,
            });
            b1 = Some(b1_entry);
        }
    }
    Ok(EntropyReport {
        model,
        initial_entropy,
        rows,
    })
}

/// Outcome of one relation check.
#[derive(Clone, Debug, PartialEq)]
pub struct RelationCheck {
    pub name: &'static str,
    /// Checks that do not apply to the scenario are reported but never fail.
    pub enforced: bool,
    /// Largest residual (or, for inequalities, largest violation) seen.
    pub worst: f64,
    pub tolerance: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct RelationSummary {
    pub checks: Vec<RelationCheck>,
}

impl RelationSummary {
    /// True when every enforced check passed.
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| !c.enforced || c.passed)
    }

    pub fn get(&self, name: &str) -> Option<&RelationCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

impl fmt::Display for RelationSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            let status = match (c.enforced, c.passed) {
                (false, _) => "SKIP",
                (true, true) => "PASS",
                (true, false) => "FAIL",
            };
            writeln!(
                f,
                "{status} {:<16} worst {:.3e} (tolerance {:.1e})",
                c.name, c.worst, c.tolerance
            )?;
        }
        Ok(())
    }
}

fn max_of(values: impl Iterator<Item = f64>) -> f64 {
    values.fold(0.0, f64::max)
}

/// Checks the entropy relations on a sweep.
///
/// * `R3`: new radiation plus resonator carries the resonator entropy at the
///   split time.
/// * `t0-independence`: the total radiation entropy does not depend on where
///   the window is split.
/// * `R4`: for a pure decaying mode the radiation mirrors the resonator.
/// * `R5`: all radiation eventually carries the initial entropy (decay).
/// * `Riv`: radiation plus resonator always carries the initial entropy.
/// * `SSA`: strong subadditivity slack is non-negative.
/// * `B1B2>=B2`: for the amplifier, adding old radiation never lowers the
///   entropy of the new radiation.
/// * `rank`: for the decay model at most one symplectic eigenvalue of any
///   subsystem departs from one.
pub fn check_relations(report: &EntropyReport, config: &ScenarioConfig) -> RelationSummary {
    let tol = config.relation_tol;
    let rows = &report.rows;
    let regular = || rows.iter().filter(|r| !r.limit);
    let decay = config.model == ModelKind::Decay;
    let mut checks = Vec::new();
    let mut push = |name, enforced: bool, worst: f64, tolerance: f64| {
        checks.push(RelationCheck {
            name,
            enforced,
            worst,
            tolerance,
            passed: worst < tolerance,
        });
    };

    push("R3", true, max_of(rows.iter().map(|r| r.r3)), tol);

    let mut spread = 0.0f64;
    for t in &config.t_grid {
        let values: Vec<f64> = regular().filter(|r| r.t == *t).map(|r| r.s_b1b2).collect();
        if values.len() > 1 {
            let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
            spread = spread.max(hi - lo);
        }
    }
    push("t0-independence", config.t0_list.len() > 1, spread, tol);

    push(
        "R4",
        config.tracks_resonator(),
        max_of(regular().map(|r| r.r4)),
        tol,
    );
    push(
        "R5",
        decay,
        max_of(rows.iter().filter(|r| r.limit).map(|r| r.r5)),
        tol,
    );
    push("Riv", true, max_of(rows.iter().map(|r| r.riv)), tol);
    push("SSA", true, max_of(rows.iter().map(|r| -r.ssa_slack)), tol);
    push(
        "B1B2>=B2",
        !decay,
        max_of(rows.iter().map(|r| r.s_b2 - r.s_b1b2)),
        tol,
    );
    let excess = rows.iter().map(|r| r.max_excited).max().unwrap_or(0);
    push("rank", decay, excess.saturating_sub(1) as f64, 0.5);
    RelationSummary { checks }
}

/// `%.{digits}g`-style formatting.
pub fn format_significant(x: f64, digits: usize) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let sci = format!("{:.*e}", digits - 1, x);
    let (mantissa, exp) = sci.split_once('e').unwrap_or((&sci, "0"));
    let exp: i32 = exp.parse().unwrap_or(0);
    let trim = |s: &str| {
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s.to_string()
        }
    };
    if exp < -4 || exp >= digits as i32 {
        format!("{}e{}{:02}", trim(mantissa), if exp < 0 { '-' } else { '+' }, exp.abs())
    } else {
        let decimals = (digits as i32 - 1 - exp).max(0) as usize;
        trim(&format!("{:.*}", decimals, x))
    }
}

fn csv_text(header: &str, records: impl Iterator<Item = Vec<String>>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    // writing to memory cannot fail
    w.write_record(header.split(',')).expect("in-memory write");
    for record in records {
        w.write_record(&record).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("ascii output")
}

/// The entropy table as comma-separated values.
pub fn render_table(report: &EntropyReport) -> String {
    csv_text(
        TABLE_HEADER,
        report.rows.iter().map(|r| {
            [
                r.t, r.t0, r.s_a_t, r.s_a_t0, r.s_b1, r.s_b2, r.s_b1b2, r.s_b2a, r.s_b1b2a, r.r3,
                r.r4, r.r5, r.riv, r.ssa_slack,
            ]
            .iter()
            .map(|v| format_significant(*v, 12))
            .collect()
        }),
    )
}

const SERIES: [(&str, &str); 7] = [
    ("S_A(t)", "#000000"),
    ("S_A(t0)", "#7f7f7f"),
    ("S_B1", "#1f77b4"),
    ("S_B2", "#ff7f0e"),
    ("S_B1B2", "#2ca02c"),
    ("S_B2A", "#d62728"),
    ("S_B1B2A", "#9467bd"),
];

fn series_values(r: &EntropyRow) -> [f64; 7] {
    [r.s_a_t, r.s_a_t0, r.s_b1, r.s_b2, r.s_b1b2, r.s_b2a, r.s_b1b2a]
}

/// Entropy against collection time for one split time, one polyline with
/// markers per entropy column. The limit row is left out.
pub fn render_plot(report: &EntropyReport, t0: f64) -> String {
    let rows: Vec<&EntropyRow> = report
        .rows
        .iter()
        .filter(|r| r.t0 == t0 && !r.limit)
        .collect();
    let (w, h, margin) = (640.0, 420.0, 50.0);
    let t_max = rows.iter().map(|r| r.t).fold(t0, f64::max);
    let s_max = rows
        .iter()
        .flat_map(|r| series_values(r))
        .fold(0.0f64, f64::max)
        .max(1e-9)
        * 1.05;
    let x = |t: f64| margin + (w - 2.0 * margin) * t / t_max;
    let y = |s: f64| h - margin - (h - 2.0 * margin) * s / s_max;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#
    );
    let _ = writeln!(svg, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<g stroke="black" fill="none"><line x1="{m}" y1="{b}" x2="{r}" y2="{b}"/><line x1="{m}" y1="{b}" x2="{m}" y2="{m}"/></g>"#,
        m = margin,
        b = h - margin,
        r = w - margin
    );
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" font-size="12" text-anchor="middle">t (1/Γ), t0 = {}</text>"#,
        w / 2.0,
        h - 12.0,
        format_significant(t0, 6)
    );
    let _ = writeln!(
        svg,
        r#"<text x="14" y="{}" font-size="12" transform="rotate(-90 14 {})" text-anchor="middle">S (nats), max {}</text>"#,
        h / 2.0,
        h / 2.0,
        format_significant(s_max, 4)
    );
    for (i, (name, color)) in SERIES.iter().enumerate() {
        let points: Vec<String> = rows
            .iter()
            .map(|r| format!("{:.2},{:.2}", x(r.t), y(series_values(r)[i])))
            .collect();
        let _ = writeln!(svg, r#"<g class="series" data-name="{name}">"#);
        let _ = writeln!(
            svg,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
            points.join(" ")
        );
        for p in &points {
            let (px, py) = p.split_once(',').unwrap_or(("0", "0"));
            let _ = writeln!(svg, r#"<circle cx="{px}" cy="{py}" r="2.5" fill="{color}"/>"#);
        }
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" font-size="11" fill="{color}">{name}</text>"#,
            w - margin - 70.0,
            margin + 14.0 * i as f64
        );
        let _ = writeln!(svg, "</g>");
    }
    svg.push_str("</svg>\n");
    svg
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Writes `<prefix>.csv` and one `<prefix>_t0_<t0>.svg` per split time into
/// `dir`, returning the paths written.
pub fn emit_outputs(report: &EntropyReport, dir: &Path, prefix: &str) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let mut written = Vec::new();
    let table = dir.join(format!("{prefix}.csv"));
    write_file(&table, &render_table(report))?;
    written.push(table);
    let mut t0s: Vec<f64> = Vec::new();
    for r in &report.rows {
        if !t0s.contains(&r.t0) {
            t0s.push(r.t0);
        }
    }
    for t0 in t0s {
        let path = dir.join(format!("{prefix}_t0_{}.svg", format_significant(t0, 6)));
        write_file(&path, &render_plot(report, t0))?;
        written.push(path);
    }
    Ok(written)
}

/// Default oracle bin width.
pub const DEFAULT_ORACLE_DT: f64 = 1e-3;
/// Oracle comparisons stop at this many decay times.
pub const ORACLE_HORIZON: f64 = 6.0;
/// Modes per window in oracle comparisons; the collision model resolves
/// low modes best, and this keeps the comparison cheap.
pub const ORACLE_K_MAX: usize = 30;

/// Entrywise covariance tolerance against the oracle, relative to the
/// largest analytic entry.
pub const ORACLE_BLOCK_TOL: f64 = 2e-2;
/// Absolute entropy tolerance against the oracle, in nats.
pub const ORACLE_ENTROPY_TOL: f64 = 5e-2;

/// One analytic-versus-oracle comparison at `(t, t0)`.
#[derive(Clone, Debug, PartialEq)]
pub struct OracleRow {
    pub t: f64,
    pub t0: f64,
    pub dt: f64,
    /// Entrywise deviation of the `B1B2A` covariance, relative to its
    /// largest entry.
    pub block_deviation: f64,
    pub worst_index: (usize, usize),
    /// Largest absolute entropy difference over the six subsystems.
    pub entropy_deviation: f64,
    pub worst_subsystem: Selection,
}

pub const ORACLE_HEADER: &str = "t,t0,dt,block_deviation,entropy_deviation,worst_subsystem";

pub fn render_oracle_table(rows: &[OracleRow]) -> String {
    csv_text(
        ORACLE_HEADER,
        rows.iter().map(|r| {
            let mut record: Vec<String> = [r.t, r.t0, r.dt, r.block_deviation, r.entropy_deviation]
                .iter()
                .map(|v| format_significant(*v, 12))
                .collect();
            record.push(r.worst_subsystem.to_string());
            record
        }),
    )
}

const ALL_SELECTIONS: [Selection; 6] = [
    Selection::A,
    Selection::B1,
    Selection::B2,
    Selection::B1B2,
    Selection::B2A,
    Selection::B1B2A,
];

/// Compares the analytic `B1B2A` covariance and the six subsystem entropies
/// against the collision model at bin width `dt`, for every `(t, t0)` of the
/// sweep with `Γt ≤ horizon`.
pub fn run_oracle_comparison(
    config: &ScenarioConfig,
    dt: f64,
    k_max: usize,
    horizon: f64,
) -> Result<Vec<OracleRow>> {
    let params = config.params()?;
    let sigma0 = initial_covariance(&config.initial_state()?);
    let tol = config.validity_tol;
    let options = AssemblyOptions {
        k_max,
        validity_tol: tol,
        ..AssemblyOptions::default()
    };
    let n = k_max + 1;
    let mut rows = Vec::new();
    for &t0 in &config.t0_list {
        for &t in config.t_grid.iter().filter(|&&t| t > t0 && config.gamma * t <= horizon) {
            let spec = SubsystemSpec::new(Selection::B1B2A, t0, t)?;
            let analytic = assemble_checked(config.model, &sigma0, &params, &spec, &options)?;
            let windows: Vec<WindowBasis> = spec
                .windows()
                .into_iter()
                .map(|w| WindowBasis::new(w, k_max))
                .collect();
            let collision = CollisionConfig::covering(dt, t, &params)?;
            let oracle = simulate_windowed(config.model, &sigma0, &collision, &windows)?;
            let report =
                compare_covariances(&analytic.covariance, &oracle, analytic.covariance.max_abs())?;
            let mut entropy_deviation = 0.0f64;
            let mut worst_subsystem = Selection::B1B2A;
            for sel in ALL_SELECTIONS {
                let modes = subsystem_modes(sel, n);
                let a = entropy(&extract_subsystem(&analytic.covariance, &modes)?, tol)?;
                let o = entropy(&extract_subsystem(&oracle, &modes)?, tol)?;
                if (a - o).abs() > entropy_deviation {
                    entropy_deviation = (a - o).abs();
                    worst_subsystem = sel;
                }
            }
            rows.push(OracleRow {
                t,
                t0,
                dt,
                block_deviation: report.max_deviation,
                worst_index: report.index,
                entropy_deviation,
                worst_subsystem,
            });
        }
    }
    Ok(rows)
}

/// Checks oracle rows against [`ORACLE_BLOCK_TOL`] and
/// [`ORACLE_ENTROPY_TOL`].
pub fn check_oracle(rows: &[OracleRow]) -> RelationSummary {
    let check = |name, worst: f64, tolerance: f64| RelationCheck {
        name,
        enforced: !rows.is_empty(),
        worst,
        tolerance,
        passed: worst < tolerance,
    };
    RelationSummary {
        checks: vec![
            check(
                "oracle-blocks",
                max_of(rows.iter().map(|r| r.block_deviation)),
                ORACLE_BLOCK_TOL,
            ),
            check(
                "oracle-entropy",
                max_of(rows.iter().map(|r| r.entropy_deviation)),
                ORACLE_ENTROPY_TOL,
            ),
        ],
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn significant_digit_formatting() {
        assert_eq!(format_significant(0.5, 12), "0.5");
        assert_eq!(format_significant(12.0, 12), "12");
        assert_eq!(format_significant(3.781_234_567_890_123, 12), "3.78123456789");
        assert_eq!(format_significant(1.5e-7, 12), "1.5e-07");
        assert_eq!(format_significant(-2.25e13, 12), "-2.25e+13");
        assert_eq!(format_significant(0.0, 12), "0");
        assert_eq!(format_significant(1e-4, 12), "0.0001");
    }

    #[test]
    fn grid_ranges_include_the_end() {
        let g = range_grid(0.5, 12.0, 0.5);
        assert_eq!(g.len(), 24);
        assert_eq!(g[23], 12.0);
        let g = range_grid(0.1, 0.7, 0.1);
        assert_eq!(g, vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7]);
    }

    #[test]
    fn subsystem_mode_layout() {
        assert_eq!(subsystem_modes(Selection::B2A, 3), vec![3, 4, 5, 6]);
        assert_eq!(subsystem_modes(Selection::B1, 2), vec![0, 1]);
        assert_eq!(subsystem_modes(Selection::A, 2), vec![4]);
    }
}
