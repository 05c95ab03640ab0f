//! CSV, JSON report and SVG plot writers.

use std::fmt::Write as _;
use std::io::{self, Write};

use dicke_sim::analysis::{default_verdict, Burst, SimulationResult, Verdict};
use dicke_sim::{PerManifold, SpinManifoldParams};
use serde::Serialize;

use crate::config::RunConfig;

pub const CSV_HEADER: &str =
    "time_ns,f_modelA_norm,f_modelB_norm,f_modelA_raw_per_ns,f_modelB_raw_per_ns,f_sigma0_B,f_sigma1_B";

/// Results for the `modelA` columns (Model A or a custom flag set) and for Model B.
#[derive(Clone, Copy, Debug)]
pub struct Traces<'a> {
    pub a: Option<&'a SimulationResult>,
    pub b: Option<&'a SimulationResult>,
}

impl<'a> Traces<'a> {
    fn times(&self) -> &'a [f64] {
        self.a.or(self.b).map(|r| r.times.as_slice()).unwrap_or(&[])
    }

    fn each(&self) -> impl Iterator<Item = &'a SimulationResult> {
        self.a.into_iter().chain(self.b)
    }
}

fn cell(out: &mut String, v: Option<f64>) {
    out.push(',');
    if let Some(v) = v {
        write!(out, "{v:e}").unwrap();
    }
}

/// One row per sample. Columns of a model that was not run are left empty.
pub fn write_csv<W: Write>(mut w: W, traces: Traces<'_>) -> io::Result<()> {
    let mut out = String::with_capacity(64 * (traces.times().len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for (k, t) in traces.times().iter().enumerate() {
        write!(out, "{t:e}").unwrap();
        cell(&mut out, traces.a.map(|r| r.f_total[k]));
        cell(&mut out, traces.b.map(|r| r.f_total[k]));
        cell(&mut out, traces.a.map(|r| r.f_total_raw[k]));
        cell(&mut out, traces.b.map(|r| r.f_total_raw[k]));
        cell(&mut out, traces.b.map(|r| r.f_per_sigma.sigma0[k]));
        cell(&mut out, traces.b.map(|r| r.f_per_sigma.sigma1[k]));
        out.push('\n');
    }
    w.write_all(out.as_bytes())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Report<'a> {
    pub tool: &'static str,
    pub version: &'static str,
    pub config: &'a RunConfig,
    pub rates_per_ns: PerManifold<SpinManifoldParams>,
    pub models: Vec<ModelReport>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ModelReport {
    pub label: String,
    pub flags: String,
    pub peak_per_ns: f64,
    pub normalization_warning: bool,
    pub min_normalized: f64,
    pub asymptote: AsymptoteSummary,
    pub crossings_ns: Vec<f64>,
    pub burst: Option<Burst>,
    pub verdict: VerdictSummary,
    pub most_negative_off_diagonal: PerManifold<Option<OffDiagonal>>,
}

/// Asymptote of the normalized trace from both routes.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AsymptoteSummary {
    pub value: f64,
    pub null_space: Option<f64>,
    pub long_horizon: f64,
    pub disagreement: Option<f64>,
    pub horizon_ns: f64,
    pub certificate: f64,
    pub null_dim: usize,
    pub defective: bool,
    pub slowest_rate_per_ns: Option<f64>,
    pub max_real_eigenvalue: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VerdictSummary {
    pub physical: bool,
    #[serde(flatten)]
    pub detail: Verdict,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OffDiagonal {
    pub row: String,
    pub col: String,
    pub value_per_ns: f64,
}

impl ModelReport {
    pub fn new(r: &SimulationResult) -> Self {
        let a = &r.asymptote_report;
        let verdict = default_verdict(r);
        ModelReport {
            label: r.model.label(),
            flags: r.model.code(),
            peak_per_ns: r.scale,
            normalization_warning: r.normalization_warning,
            min_normalized: r.min_normalized(),
            asymptote: AsymptoteSummary {
                value: a.value,
                null_space: a.null_space,
                long_horizon: a.long_horizon,
                disagreement: a.disagreement(),
                horizon_ns: a.horizon_ns,
                certificate: a.certificate,
                null_dim: a.null_dim,
                defective: a.defective,
                slowest_rate_per_ns: a.slowest_rate,
                max_real_eigenvalue: a.max_real_eigenvalue,
            },
            crossings_ns: r.crossings.clone(),
            burst: r.burst,
            verdict: VerdictSummary {
                physical: verdict.is_physical(),
                detail: verdict,
            },
            most_negative_off_diagonal: r.most_negative_off_diagonal.map(|_, e| {
                e.as_ref().map(|(row, col, v)| OffDiagonal {
                    row: row.clone(),
                    col: col.clone(),
                    value_per_ns: *v,
                })
            }),
        }
    }
}

pub fn report<'a>(config: &'a RunConfig, rates: PerManifold<SpinManifoldParams>, traces: Traces<'_>) -> Report<'a> {
    Report {
        tool: "dicke-sim",
        version: env!("CARGO_PKG_VERSION"),
        config,
        rates_per_ns: rates,
        models: traces.each().map(ModelReport::new).collect(),
    }
}

pub fn report_json(report: &Report<'_>) -> String {
    let mut s = serde_json::to_string_pretty(report).expect("report serializes");
    s.push('\n');
    s
}

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 500.0;
const MARGIN: (f64, f64, f64, f64) = (70.0, 20.0, 30.0, 55.0); // left, right, top, bottom

fn nice_step(span: f64, target: usize) -> f64 {
    let raw = span / target as f64;
    let mag = 10f64.powf(raw.log10().floor());
    let norm = raw / mag;
    let k = if norm < 1.5 {
        1.0
    } else if norm < 3.0 {
        2.0
    } else if norm < 7.0 {
        5.0
    } else {
        10.0
    };
    k * mag
}

fn ticks(lo: f64, hi: f64, target: usize) -> Vec<f64> {
    let step = nice_step(hi - lo, target);
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    (first..=last).map(|k| k as f64 * step).collect()
}

fn fmt_tick(v: f64) -> String {
    let s = format!("{:.3}", v);
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".to_string()
    } else {
        s.to_string()
    }
}

/// Normalized traces against time, with dashed markers at the zero crossings
/// of the `modelA` trace.
pub fn render_svg(traces: Traces<'_>) -> String {
    let times = traces.times();
    let t_max = times.last().copied().unwrap_or(1.0).max(f64::MIN_POSITIVE);
    let (mut y_lo, mut y_hi) = (0.0f64, 1.0f64);
    for r in traces.each() {
        for &v in &r.f_total {
            y_lo = y_lo.min(v);
            y_hi = y_hi.max(v);
        }
    }
    let pad = 0.05 * (y_hi - y_lo);
    let (y_lo, y_hi) = (y_lo - pad, y_hi + pad);

    let (ml, mr, mt, mb) = MARGIN;
    let pw = WIDTH - ml - mr;
    let ph = HEIGHT - mt - mb;
    let x = |t: f64| ml + pw * t / t_max;
    let y = |v: f64| mt + ph * (y_hi - v) / (y_hi - y_lo);

    let mut s = String::new();
    writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    )
    .unwrap();
    writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#).unwrap();

    for t in ticks(0.0, t_max, 8) {
        let px = x(t);
        writeln!(
            s,
            r##"<line x1="{px:.2}" y1="{mt}" x2="{px:.2}" y2="{:.2}" stroke="#e0e0e0"/>"##,
            mt + ph
        )
        .unwrap();
        writeln!(
            s,
            r#"<text x="{px:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            mt + ph + 18.0,
            fmt_tick(t)
        )
        .unwrap();
    }
    for v in ticks(y_lo, y_hi, 6) {
        let py = y(v);
        writeln!(
            s,
            r##"<line x1="{ml}" y1="{py:.2}" x2="{:.2}" y2="{py:.2}" stroke="#e0e0e0"/>"##,
            ml + pw
        )
        .unwrap();
        writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
            ml - 6.0,
            py + 4.0,
            fmt_tick(v)
        )
        .unwrap();
    }
    let zero = y(0.0);
    writeln!(
        s,
        r#"<line x1="{ml}" y1="{zero:.2}" x2="{:.2}" y2="{zero:.2}" stroke="black" stroke-width="0.8"/>"#,
        ml + pw
    )
    .unwrap();
    writeln!(
        s,
        r#"<rect x="{ml}" y="{mt}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
    )
    .unwrap();
    writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">time (ns)</text>"#,
        ml + pw / 2.0,
        HEIGHT - 12.0
    )
    .unwrap();
    writeln!(
        s,
        r#"<text transform="translate(18 {:.2}) rotate(-90)" text-anchor="middle">normalized fluorescence</text>"#,
        mt + ph / 2.0
    )
    .unwrap();

    if let Some(a) = traces.a {
        for &t in &a.crossings {
            let px = x(t);
            writeln!(
                s,
                r##"<line x1="{px:.2}" y1="{mt}" x2="{px:.2}" y2="{:.2}" stroke="#d62728" stroke-dasharray="4 3"/>"##,
                mt + ph
            )
            .unwrap();
        }
    }

    let polyline = |s: &mut String, r: &SimulationResult, style: &str| {
        s.push_str("<polyline fill=\"none\" ");
        s.push_str(style);
        s.push_str(" points=\"");
        for (k, (&t, &v)) in r.times.iter().zip(&r.f_total).enumerate() {
            if k > 0 {
                s.push(' ');
            }
            write!(s, "{:.2},{:.2}", x(t), y(v)).unwrap();
        }
        s.push_str("\"/>\n");
    };
    let mut legend = Vec::new();
    if let Some(b) = traces.b {
        let style = r##"stroke="#1b9e4b" stroke-width="1.8" stroke-dasharray="8 4""##;
        polyline(&mut s, b, style);
        legend.push((b.model.label(), style));
    }
    if let Some(a) = traces.a {
        let style = r##"stroke="#7b3294" stroke-width="1.8""##;
        polyline(&mut s, a, style);
        legend.push((a.model.label(), style));
    }
    legend.reverse();
    for (k, (label, style)) in legend.iter().enumerate() {
        let ly = mt + 18.0 + 18.0 * k as f64;
        let lx = ml + pw - 190.0;
        writeln!(
            s,
            r#"<line x1="{lx:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" {style}/>"#,
            lx + 30.0
        )
        .unwrap();
        writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}">{}</text>"#,
            lx + 38.0,
            ly + 4.0,
            xml_escape(label)
        )
        .unwrap();
    }
    s.push_str("</svg>\n");
    s
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
