use std::io::Write;
use std::path::{Path, PathBuf};

use pointspec::random::{construct_degenerate, monte_carlo, DegenerateOptions, MonteCarloReport};
use pointspec::{
    classify_all, classify_dichotomy, eigenvalues_in_range, iwasawa_compose, iwasawa_decompose,
    transfer, DichotomyVerdict, Execution, Mat2, Parameter,
};
use serde::Serialize;

use crate::config::{ExperimentConfig, Format, TransferMode};
use crate::error::{CliError, Result};
use crate::{Cli, Command};

struct Sink {
    path: Option<PathBuf>,
    format: Format,
    quiet: bool,
}

impl Sink {
    fn new(cli: &Cli, config: Option<&ExperimentConfig>) -> Self {
        let block = config.and_then(|c| c.output.clone()).unwrap_or_default();
        Sink {
            path: cli.output.clone().or(block.path),
            format: cli.format.or(block.format).unwrap_or_default(),
            quiet: cli.quiet,
        }
    }

    fn note(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            eprintln!("{}", msg.as_ref());
        }
    }

    fn emit(&self, bytes: &[u8]) -> Result<()> {
        match &self.path {
            Some(p) => write_file(p, bytes),
            None => std::io::stdout()
                .write_all(bytes)
                .map_err(|source| CliError::Write {
                    path: PathBuf::from("<stdout>"),
                    source,
                }),
        }
    }

    fn json<T: Serialize + ?Sized>(&self, value: &T) -> Result<()> {
        self.emit(&json_bytes(value))
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|source| CliError::Write {
        path: path.to_owned(),
        source,
    })
}

fn json_bytes<T: Serialize + ?Sized>(value: &T) -> Vec<u8> {
    let mut s = serde_json::to_vec_pretty(value).expect("output serializes");
    s.push(b'\n');
    s
}

fn csv_bytes<R: Serialize>(rows: impl IntoIterator<Item = R>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|source| CliError::Write {
        path: PathBuf::from("<csv buffer>"),
        source,
    })?;
    Ok(w.into_inner().expect("flushed"))
}

fn load(cli: &Cli) -> Result<ExperimentConfig> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| CliError::Config("this command needs --config PATH".into()))?;
    ExperimentConfig::load(path, cli.degrees)
}

pub fn execute(cli: &Cli) -> Result<()> {
    match cli.command {
        Command::Decompose { a, b, c, d } => decompose(cli, [a, b, c, d]),
        Command::Transfer => cmd_transfer(cli),
        Command::Eigs => eigs(cli),
        Command::Dichotomy => dichotomy(cli),
        Command::Montecarlo => montecarlo(cli),
        Command::Degenerate => degenerate(cli),
    }
}

#[derive(Serialize)]
struct Decomposition {
    alpha: f64,
    r: f64,
    theta: f64,
    residual: f64,
}

fn decompose(cli: &Cli, [a, b, c, d]: [f64; 4]) -> Result<()> {
    let sink = Sink::new(cli, None);
    let m = Mat2::new(a, b, c, d)?;
    let p = iwasawa_decompose(&m)?;
    let residual = iwasawa_compose(&p).max_abs_diff(&m);
    let theta = if cli.degrees { p.theta().to_degrees() } else { p.theta() };
    let row = Decomposition {
        alpha: p.alpha(),
        r: p.r(),
        theta,
        residual,
    };
    match sink.format {
        Format::Json => sink.json(&row),
        Format::Csv => sink.emit(&csv_bytes([row])?),
    }
}

#[derive(Serialize)]
struct MatrixOut {
    x: f64,
    y: f64,
    energy: f64,
    matrix: Mat2,
    det_drift: f64,
}

#[derive(Serialize)]
struct MatrixRow {
    x: f64,
    y: f64,
    energy: f64,
    m11: f64,
    m12: f64,
    m21: f64,
    m22: f64,
    det_drift: f64,
}

#[derive(Serialize)]
struct PruferRow {
    x: f64,
    phi: f64,
}

#[derive(Serialize)]
struct PruferOut<'a> {
    energy: f64,
    samples: Vec<PruferRow>,
    jumps: &'a [pointspec::problem::PruferJump],
}

fn cmd_transfer(cli: &Cli) -> Result<()> {
    let config = load(cli)?;
    let sink = Sink::new(cli, Some(&config));
    let problem = config.problem()?;
    let block = config.block(&config.transfer, "transfer")?;
    let ctl = config.tolerances.step;
    match block.mode {
        TransferMode::Matrix => {
            let x = block.x.unwrap_or(problem.b());
            let y = block.y.unwrap_or(problem.a());
            let t = transfer(problem.potential(), x, y, block.energy, &ctl)?;
            match sink.format {
                Format::Json => sink.json(&MatrixOut {
                    x,
                    y,
                    energy: block.energy,
                    matrix: t.matrix,
                    det_drift: t.det_drift,
                }),
                Format::Csv => {
                    let m = t.matrix;
                    sink.emit(&csv_bytes([MatrixRow {
                        x,
                        y,
                        energy: block.energy,
                        m11: m.a,
                        m12: m.b,
                        m21: m.c,
                        m22: m.d,
                        det_drift: t.det_drift,
                    }])?)
                }
            }
        }
        TransferMode::Prufer => {
            let resolution = block
                .resolution
                .unwrap_or((problem.b() - problem.a()) / 1000.0);
            let trace =
                problem.prufer_trace(block.energy, problem.initial_state(), resolution, &ctl)?;
            let rows = trace.samples().map(|s| PruferRow { x: s.x, phi: s.phi });
            match sink.format {
                Format::Json => sink.json(&PruferOut {
                    energy: block.energy,
                    samples: rows.collect(),
                    jumps: &trace.jumps,
                }),
                Format::Csv => sink.emit(&csv_bytes(rows)?),
            }
        }
    }
}

#[derive(Serialize)]
struct VerdictSummary {
    site: usize,
    parameter: Parameter,
    verdict: &'static str,
    matched_class: Option<&'static str>,
    consistent: bool,
}

impl From<&DichotomyVerdict> for VerdictSummary {
    fn from(v: &DichotomyVerdict) -> Self {
        VerdictSummary {
            site: v.site,
            parameter: v.parameter,
            verdict: v.verdict.name(),
            matched_class: v.matched_class.map(class_name),
            consistent: v.consistent,
        }
    }
}

fn class_name(c: pointspec::spectra::FixedClass) -> &'static str {
    match c {
        pointspec::spectra::FixedClass::SinCos => "sin_cos",
        pointspec::spectra::FixedClass::CosMinusSin => "cos_minus_sin",
    }
}

#[derive(Serialize)]
struct EigEntry {
    energy: f64,
    mismatch: f64,
    signed_mismatch: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    verdicts: Option<Vec<VerdictSummary>>,
}

#[derive(Serialize)]
struct EigRow {
    energy: f64,
    mismatch: f64,
}

#[derive(Serialize)]
struct VerdictRow {
    energy: f64,
    site: usize,
    parameter: &'static str,
    verdict: &'static str,
    matched_class: &'static str,
    consistent: bool,
}

fn verdict_row(energy: f64, v: &VerdictSummary) -> VerdictRow {
    VerdictRow {
        energy,
        site: v.site,
        parameter: v.parameter.name(),
        verdict: v.verdict,
        matched_class: v.matched_class.unwrap_or(""),
        consistent: v.consistent,
    }
}

fn eigs(cli: &Cli) -> Result<()> {
    let config = load(cli)?;
    let sink = Sink::new(cli, Some(&config));
    let problem = config.problem()?;
    let block = config.block(&config.eigs, "eigs")?;
    let tol = &config.tolerances;
    if block.grid < 2 {
        return Err(CliError::Config(format!("eigs.grid must be at least 2, got {}", block.grid)));
    }
    let reports = eigenvalues_in_range(
        problem,
        block.e_lo,
        block.e_hi,
        block.grid,
        &tol.search(),
        &tol.step,
        Execution::Parallel,
    )?;
    let mut entries = Vec::with_capacity(reports.len());
    for r in reports {
        let verdicts = if block.classify && r.is_eigenvalue(tol.eigen) {
            let mut all = Vec::new();
            for site in 0..problem.interactions().len() {
                let vs = classify_all(problem, r.energy, site, &tol.dichotomy(), &tol.step)?;
                all.extend(vs.iter().map(VerdictSummary::from));
            }
            Some(all)
        } else if block.classify {
            Some(Vec::new())
        } else {
            None
        };
        entries.push(EigEntry {
            energy: r.energy,
            mismatch: r.mismatch,
            signed_mismatch: r.signed_mismatch,
            verdicts,
        });
    }
    sink.note(format!("{} eigenvalues in [{}, {}]", entries.len(), block.e_lo, block.e_hi));
    match sink.format {
        Format::Json => sink.json(&entries),
        Format::Csv if block.classify => sink.emit(&csv_bytes(entries.iter().flat_map(|e| {
            e.verdicts
                .iter()
                .flatten()
                .map(move |v| verdict_row(e.energy, v))
        }))?),
        Format::Csv => sink.emit(&csv_bytes(entries.iter().map(|e| EigRow {
            energy: e.energy,
            mismatch: e.mismatch,
        }))?),
    }
}

fn dichotomy(cli: &Cli) -> Result<()> {
    let config = load(cli)?;
    let sink = Sink::new(cli, Some(&config));
    let problem = config.problem()?;
    let block = config.block(&config.dichotomy, "dichotomy")?;
    let tol = &config.tolerances;
    let n = problem.interactions().len();
    let sites: Vec<usize> = match block.site {
        Some(s) if s >= n => {
            return Err(CliError::Config(format!("dichotomy.site {s} out of range ({n} sites)")))
        }
        Some(s) => vec![s],
        None => (0..n).collect(),
    };
    if sites.is_empty() {
        return Err(CliError::Config("problem has no interactions to classify".into()));
    }
    let mut verdicts = Vec::new();
    for site in sites {
        for p in Parameter::ALL {
            verdicts.push(classify_dichotomy(problem, block.energy, site, p, &tol.dichotomy(), &tol.step)?);
        }
    }
    if verdicts.iter().any(|v| !v.consistent) {
        sink.note("warning: some re-tests disagree with the verdict (see \"consistent\")");
    }
    match sink.format {
        Format::Json => sink.json(&verdicts),
        Format::Csv => sink.emit(&csv_bytes(
            verdicts
                .iter()
                .map(|v| verdict_row(block.energy, &VerdictSummary::from(v))),
        )?),
    }
}

fn histogram_path(output: &Path) -> PathBuf {
    let mut name = output.file_stem().unwrap_or_default().to_os_string();
    name.push(".histogram.csv");
    output.with_file_name(name)
}

fn montecarlo(cli: &Cli) -> Result<()> {
    let config = load(cli)?;
    let sink = Sink::new(cli, Some(&config));
    let problem = config.problem()?;
    let block = config.block(&config.montecarlo, "montecarlo")?;
    let mut ensemble = block.ensemble.clone();
    if let Some(seed) = cli.seed {
        ensemble.seed = seed;
    }
    let report: MonteCarloReport = monte_carlo(
        problem,
        block.energy,
        &ensemble,
        block.samples,
        block.epsilon,
        &config.tolerances.step,
        Execution::Parallel,
    )?;
    sink.note(format!(
        "{} of {} samples within epsilon = {:e} ({} failed)",
        report.hits, report.samples, report.epsilon, report.failures
    ));
    let histogram = csv_bytes(&report.histogram)?;
    match sink.format {
        Format::Csv => sink.emit(&histogram),
        Format::Json => {
            sink.json(&report)?;
            let path = block
                .histogram
                .clone()
                .or_else(|| sink.path.as_deref().map(histogram_path));
            match path {
                Some(p) => write_file(&p, &histogram),
                None => Ok(()),
            }
        }
    }
}

#[derive(Serialize)]
struct SiteRow {
    site: usize,
    x: f64,
    alpha: f64,
    r: f64,
    theta: f64,
    gap_lo: f64,
    gap_hi: f64,
}

fn degenerate(cli: &Cli) -> Result<()> {
    let config = load(cli)?;
    let sink = Sink::new(cli, Some(&config));
    let problem = config.problem()?;
    let block = config.block(&config.degenerate, "degenerate")?;
    let options = DegenerateOptions {
        allow_non_eigenvalue: block.allow_non_eigenvalue,
    };
    let built = construct_degenerate(
        problem,
        block.energy,
        &block.thetas,
        &block.rs,
        &options,
        &config.tolerances.step,
    )?;
    let rows: Vec<SiteRow> = built
        .problem
        .interactions()
        .iter()
        .zip(&built.gaps)
        .enumerate()
        .map(|(site, (p, gap))| SiteRow {
            site,
            x: p.x,
            alpha: p.params.alpha(),
            r: p.params.r(),
            theta: p.params.theta(),
            gap_lo: gap.0,
            gap_hi: gap.1,
        })
        .collect();
    for r in &rows {
        sink.note(format!("site {} at x = {} in [{}, {})", r.site, r.x, r.gap_lo, r.gap_hi));
    }
    sink.note(format!(
        "mismatch of E = {}: unperturbed {:e}, constructed {:e}",
        block.energy, built.unperturbed_mismatch, built.residual_mismatch
    ));
    match sink.format {
        Format::Csv => sink.emit(&csv_bytes(rows)?),
        Format::Json => {
            let out = ExperimentConfig {
                problem: Some(built.problem),
                degenerate: None,
                output: None,
                ..config.clone()
            };
            sink.emit(out.to_json().as_bytes())
        }
    }
}
