use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use dicke_sim::analysis::{compare_against_b, AblationReport, AblationRow, SimulationResult};
use dicke_sim::oracle::{self, OracleSummary};
use dicke_sim::{ablate, presets, simulate, TermFlags};

use crate::config::{ModelChoice, RunConfig};
use crate::error::{CliError, ConfigError};
use crate::output::{self, Traces};

pub const CSV_FILE: &str = "fluorescence.csv";
pub const REPORT_FILE: &str = "report.json";
pub const SVG_FILE: &str = "fluorescence.svg";
pub const ABLATION_FILE: &str = "ablation.json";

/// The traces behind the `modelA` and `modelB` columns.
#[derive(Clone, Debug)]
pub struct Runs {
    pub a: Option<SimulationResult>,
    pub b: Option<SimulationResult>,
}

impl Runs {
    pub fn traces(&self) -> Traces<'_> {
        Traces {
            a: self.a.as_ref(),
            b: self.b.as_ref(),
        }
    }
}

pub fn run_models(cfg: &RunConfig) -> Result<Runs, CliError> {
    let params = cfg.to_params()?;
    let integ = cfg.integrator();
    let n = cfg.n_centers;
    match cfg.model {
        ModelChoice::A => Ok(Runs {
            a: Some(simulate(n, &params, TermFlags::MODEL_A, &integ)?),
            b: None,
        }),
        ModelChoice::B => Ok(Runs {
            a: None,
            b: Some(simulate(n, &params, TermFlags::MODEL_B, &integ)?),
        }),
        ModelChoice::Both | ModelChoice::Custom(_) => {
            let flags = cfg.model.primary().expect("both and custom trace a primary model");
            let cmp = compare_against_b(n, &params, flags, &integ)?;
            Ok(Runs {
                a: Some(cmp.model_a),
                b: Some(cmp.model_b),
            })
        }
    }
}

fn write_file(path: PathBuf, contents: &[u8]) -> Result<PathBuf, CliError> {
    fs::write(&path, contents).map_err(|source| CliError::Io {
        path: path.clone(),
        source,
    })?;
    Ok(path)
}

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|source| CliError::Io {
        path: dir.to_path_buf(),
        source,
    })
}

/// Runs the configured models and writes CSV, report and optionally SVG.
/// Returns the written paths and a human-readable summary.
pub fn simulate_cmd(cfg: &RunConfig) -> Result<(Vec<PathBuf>, String), CliError> {
    let runs = run_models(cfg)?;
    let params = cfg.to_params()?;
    let mut csv = Vec::new();
    output::write_csv(&mut csv, runs.traces()).expect("writing to memory");
    let report = output::report_json(&output::report(cfg, params, runs.traces()));
    let svg = cfg.svg.then(|| output::render_svg(runs.traces()));

    ensure_dir(&cfg.out_dir)?;
    let mut written = vec![
        write_file(cfg.out_dir.join(CSV_FILE), &csv)?,
        write_file(cfg.out_dir.join(REPORT_FILE), report.as_bytes())?,
    ];
    if let Some(svg) = svg {
        written.push(write_file(cfg.out_dir.join(SVG_FILE), svg.as_bytes())?);
    }
    Ok((written, summary(&runs)))
}

fn summary(runs: &Runs) -> String {
    let mut s = String::new();
    for r in runs.a.iter().chain(&runs.b) {
        let v = dicke_sim::analysis::default_verdict(r);
        writeln!(
            s,
            "{:<22} {:<10} min {:>+.3e}  asymptote {:>+.3e}  crossings {:>3}  negative counts: {:<3}  nonzero asymptote: {}",
            r.model.label(),
            if v.is_physical() { "physical" } else { "unphysical" },
            v.min_normalized,
            v.asymptote,
            r.crossings.len(),
            yes_no(v.negative_counts),
            yes_no(v.nonzero_asymptote),
        )
        .unwrap();
    }
    s
}

fn yes_no(b: bool) -> &'static str {
    if b {
        "yes"
    } else {
        "no"
    }
}

/// Asymptotes of the normalized traces from both routes.
pub fn asymptote_cmd(cfg: &RunConfig) -> Result<String, CliError> {
    let runs = run_models(cfg)?;
    let mut s = String::new();
    writeln!(
        s,
        "{:<22} {:>14} {:>14} {:>14} {:>10} {:>9} {:>10}",
        "model", "asymptote", "null space", "long horizon", "gap", "null dim", "T (ns)"
    )
    .unwrap();
    for r in runs.a.iter().chain(&runs.b) {
        let a = &r.asymptote_report;
        let opt = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |x| format!("{x:+.6e}"));
        writeln!(
            s,
            "{:<22} {:>+14.6e} {:>14} {:>+14.6e} {:>10} {:>9} {:>10}{}",
            r.model.label(),
            a.value,
            opt(a.null_space),
            a.long_horizon,
            a.disagreement().map_or_else(|| "-".to_string(), |g| format!("{g:.1e}")),
            a.null_dim,
            a.horizon_ns,
            if a.defective {
                "  (defective zero eigenvalue)"
            } else {
                ""
            },
        )
        .unwrap();
    }
    Ok(s)
}

pub fn ablate_cmd(cfg: &RunConfig) -> Result<(AblationReport, PathBuf, String), CliError> {
    let params = cfg.to_params()?;
    let report = ablate(cfg.n_centers, &params, &cfg.integrator())?;
    let json = serde_json::to_string_pretty(&report).expect("ablation report serializes") + "\n";
    ensure_dir(&cfg.out_dir)?;
    let path = write_file(cfg.out_dir.join(ABLATION_FILE), json.as_bytes())?;
    let table = ablation_table(&report);
    Ok((report, path, table))
}

pub fn ablation_table(report: &AblationReport) -> String {
    let mut s = String::new();
    writeln!(
        s,
        "N = {}: Model A with one term switched to its Model B form",
        report.n_emitters
    )
    .unwrap();
    writeln!(
        s,
        "{:<10} {:<10} {:>12} {:>12} {:>10} {:>17} {:>19}",
        "run", "flags", "min", "asymptote", "crossings", "negative counts", "nonzero asymptote"
    )
    .unwrap();
    let row = |s: &mut String, name: String, r: &AblationRow| {
        match (&r.verdict, &r.error) {
            (Some(v), _) => writeln!(
                s,
                "{:<10} {:<10} {:>+12.4e} {:>+12.4e} {:>10} {:>17} {:>19}",
                name,
                r.flags.code(),
                v.min_normalized,
                v.asymptote,
                r.crossings,
                yes_no(v.negative_counts),
                yes_no(v.nonzero_asymptote),
            ),
            (None, e) => writeln!(
                s,
                "{:<10} {:<10} failed: {}",
                name,
                r.flags.code(),
                e.as_deref().unwrap_or("unknown")
            ),
        }
        .unwrap();
    };
    row(&mut s, "Model A".into(), &report.model_a);
    row(&mut s, "Model B".into(), &report.model_b);
    for r in &report.single_fixes {
        let name = r.term.map_or_else(|| "?".to_string(), |t| format!("fix {t}"));
        row(&mut s, name, r);
    }
    let fixes = |pred: fn(&AblationRow) -> Option<bool>| {
        let terms: Vec<String> = report
            .single_fixes
            .iter()
            .filter(|r| pred(r) == Some(true))
            .filter_map(|r| r.term.map(|t| t.to_string()))
            .collect();
        if terms.is_empty() {
            "none".to_string()
        } else {
            terms.join(", ")
        }
    };
    writeln!(
        s,
        "single fixes removing negative counts:   {}",
        fixes(AblationRow::removes_negative_counts)
    )
    .unwrap();
    writeln!(
        s,
        "single fixes removing nonzero asymptote: {}",
        fixes(AblationRow::removes_nonzero_asymptote)
    )
    .unwrap();
    s
}

pub const ORACLE_LIMIT: f64 = 1e-12;

pub fn oracle_cmd(max_n: u32) -> Result<(OracleSummary, String), CliError> {
    let summary = oracle::verify(max_n)?;
    let mut s = String::new();
    writeln!(s, "{:<48} {:>8} {:>14}", "identity", "cases", "max deviation").unwrap();
    for c in &summary.checks {
        writeln!(s, "{:<48} {:>8} {:>14.3e}", c.identity, c.cases, c.max_deviation).unwrap();
    }
    if summary.worst() >= ORACLE_LIMIT {
        return Err(CliError::OracleDeviation(summary.worst()));
    }
    Ok((summary, s))
}

pub fn presets_cmd(show: Option<&str>) -> Result<String, ConfigError> {
    if let Some(name) = show {
        return Ok(crate::config::preset(name)?.serialize());
    }
    let mut s = String::new();
    writeln!(
        s,
        "{:<6} {:>3} {:>9} {:>7} {:>9} {:>9} {:>10} {:>10}   (rates in 2π MHz)",
        "name", "N", "p_sigma0", "gamma", "gd_s0", "gd_s1", "gisc_s0", "gisc_s1"
    )
    .unwrap();
    for p in presets::ALL {
        writeln!(
            s,
            "{:<6} {:>3} {:>9} {:>7} {:>9} {:>9} {:>10} {:>10}",
            p.name,
            p.n_emitters,
            p.p_sigma0,
            p.gamma,
            p.gamma_d.sigma0,
            p.gamma_d.sigma1,
            p.gamma_isc.sigma0,
            p.gamma_isc.sigma1
        )
        .unwrap();
    }
    Ok(s)
}

/// Sizes the global thread pool from `DICKE_SIM_THREADS`, if set.
pub fn configure_threads(value: Option<&str>) -> Result<(), ConfigError> {
    let Some(raw) = value else { return Ok(()) };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| ConfigError::Threads(raw.to_string()))?;
    // a second initialization in the same process keeps the first pool
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

pub fn read_config(path: &Path) -> Result<RunConfig, ConfigError> {
    let text = fs::read_to_string(path).map_err(|e| ConfigError::Read {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    RunConfig::parse(&text)
}
