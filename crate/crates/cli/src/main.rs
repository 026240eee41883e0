//! `drfrontier`: special portfolios, frontier curves, MDP bounds and
//! embeddings from a covariance JSON or a price/return CSV.

mod svg;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use drfrontier::format::sig12;
use drfrontier::frontiers::{empirical_inflection, FrontierParams};
use drfrontier::ingest::file_sha256;
use drfrontier::mdp::MdpAnalysis;
use drfrontier::{
    annualize, embed, frontier_params, load_panel, mdp_analysis, min_variance_portfolio,
    special_portfolios, sweep, validate_universe, AssetUniverse, CurveKind, EdmEmbedding,
    FrontierCurve, PanelFormat, Portfolio, Provenance,
};
use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Parser)]
#[command(name = "drfrontier", version, about = "Diversification-return portfolio analytics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Minimum variance, maximum DR, Q and tangent portfolios.
    Portfolios {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Frontier curves over a risk grid, optionally plotted.
    Frontier {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        output: OutputArgs,
        /// `min:max:points[:log]`; defaults to 200 points geometric in excess variance.
        #[arg(long)]
        grid: Option<GridSpec>,
        /// Comma-separated curve kinds; defaults to every kind the input supports.
        #[arg(long, value_delimiter = ',')]
        kinds: Option<Vec<String>>,
        /// Also write sigma_q.svg, sigma_c.svg and sigma_R.svg.
        #[arg(long)]
        svg: bool,
    },
    /// Maximum diversification ratio portfolio and d_max bounds.
    Mdp {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        output: OutputArgs,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Random replicator starts on top of vertices and pair midpoints.
        #[arg(long, default_value_t = 64)]
        starts: usize,
        /// Long-only samples per sandwich risk level.
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
        /// Comma-separated sandwich risk levels; defaults to multiples of sigma_mvp.
        #[arg(long, value_delimiter = ',')]
        sigmas: Option<Vec<f64>>,
    },
    /// Distance matrix embedding coordinates.
    Embed {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Load and annualize a panel, writing universe.json and provenance.json.
    IngestCheck {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
}

#[derive(Args)]
struct InputArgs {
    #[arg(long)]
    input: PathBuf,
    /// Defaults to covariance for `.json` files and prices otherwise.
    #[arg(long, value_enum)]
    format: Option<InputFormat>,
    /// Risk-free rate, overriding any `r0` in the input.
    #[arg(long)]
    riskfree: Option<f64>,
    #[arg(long)]
    log_returns: bool,
    /// Fail when the input has no expected returns.
    #[arg(long)]
    require_returns: bool,
}

#[derive(Args)]
struct OutputArgs {
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum InputFormat {
    Prices,
    Returns,
    Covariance,
}

#[derive(Clone, Debug, PartialEq)]
struct GridSpec {
    min: f64,
    max: f64,
    points: usize,
    log: bool,
}

impl FromStr for GridSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split(':').collect();
        if !(3..=4).contains(&parts.len()) {
            return Err("expected min:max:points[:log]".into());
        }
        let num = |p: &str| p.parse::<f64>().map_err(|e| format!("{p:?}: {e}"));
        let min = num(parts[0])?;
        let max = num(parts[1])?;
        let points: usize = parts[2].parse().map_err(|e| format!("{:?}: {e}", parts[2]))?;
        let log = match parts.get(3) {
            None => false,
            Some(&"log") => true,
            Some(other) => return Err(format!("unknown spacing {other:?}")),
        };
        if points < 2 {
            return Err("grid needs at least 2 points".into());
        }
        if !(max > min) || !min.is_finite() || !max.is_finite() {
            return Err("grid needs finite min < max".into());
        }
        if log && min <= 0.0 {
            return Err("log spacing needs min > 0".into());
        }
        Ok(GridSpec {
            min,
            max,
            points,
            log,
        })
    }
}

struct Failure {
    code: u8,
    kind: String,
    message: String,
}

impl From<drfrontier::Error> for Failure {
    fn from(e: drfrontier::Error) -> Self {
        Failure {
            code: 2,
            kind: e.kind().to_string(),
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure {
            code: 1,
            kind: "Io".into(),
            message: e.to_string(),
        }
    }
}

type Outcome<T> = Result<T, Failure>;

#[derive(Deserialize)]
struct CovarianceInput {
    names: Option<Vec<String>>,
    #[serde(rename = "V")]
    v: Vec<Vec<f64>>,
    rbar: Option<Vec<f64>>,
    r0: Option<f64>,
}

struct Loaded {
    universe: AssetUniverse,
    provenance: Option<Provenance>,
}

fn load(args: &InputArgs) -> Outcome<Loaded> {
    let format = args.format.unwrap_or_else(|| {
        match args.input.extension().and_then(|e| e.to_str()) {
            Some("json") => InputFormat::Covariance,
            _ => InputFormat::Prices,
        }
    });
    let mut loaded = match format {
        InputFormat::Covariance => {
            let text = fs::read_to_string(&args.input)?;
            let raw: CovarianceInput = serde_json::from_str(&text).map_err(|e| Failure {
                code: 2,
                kind: "ParseError".into(),
                message: format!("{}: {e}", args.input.display()),
            })?;
            let mut u = validate_universe(&raw.v, raw.rbar.as_deref(), raw.r0)?;
            if let Some(names) = raw.names {
                u = u.renamed(names)?;
            }
            Loaded {
                universe: u,
                provenance: None,
            }
        }
        InputFormat::Prices | InputFormat::Returns => {
            let pf = if format == InputFormat::Prices {
                PanelFormat::Prices
            } else {
                PanelFormat::Returns
            };
            let panel = load_panel(&args.input, pf, args.log_returns)?;
            let ann = annualize(&panel)?;
            let sha = file_sha256(&args.input)?;
            let provenance = Provenance::new(sha, pf, args.log_returns, &panel, &ann);
            Loaded {
                universe: ann.universe,
                provenance: Some(provenance),
            }
        }
    };
    if args.riskfree.is_some() {
        loaded.universe = loaded.universe.with_risk_free_rate(args.riskfree);
    }
    if args.require_returns && loaded.universe.expected_returns().is_none() {
        return Err(drfrontier::Error::MissingReturns.into());
    }
    Ok(loaded)
}

/// Rounds every float to 12 significant digits.
fn rounded(v: Value) -> Value {
    match v {
        Value::Number(n) if n.is_f64() => {
            let x = sig12(n.as_f64().unwrap_or(f64::NAN));
            serde_json::Number::from_f64(x).map_or(Value::Null, Value::Number)
        }
        Value::Array(a) => Value::Array(a.into_iter().map(rounded).collect()),
        Value::Object(o) => Value::Object(o.into_iter().map(|(k, v)| (k, rounded(v))).collect()),
        other => other,
    }
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Outcome<()> {
    let v = serde_json::to_value(value).map_err(|e| Failure {
        code: 1,
        kind: "Serialize".into(),
        message: e.to_string(),
    })?;
    let mut text = serde_json::to_string_pretty(&rounded(v)).unwrap_or_default();
    text.push('\n');
    write_file(dir, name, &text)
}

fn write_file(dir: &Path, name: &str, text: &str) -> Outcome<()> {
    fs::create_dir_all(dir)?;
    let path = dir.join(name);
    fs::write(&path, text)?;
    log::info!("wrote {}", path.display());
    Ok(())
}

#[derive(Serialize)]
struct UniverseOut<'a> {
    names: &'a [String],
    #[serde(rename = "V")]
    v: Vec<Vec<f64>>,
    rbar: Option<Vec<f64>>,
    r0: Option<f64>,
}

fn universe_json(u: &AssetUniverse) -> UniverseOut<'_> {
    let cov = u.covariance();
    UniverseOut {
        names: u.names(),
        v: (0..u.n())
            .map(|i| (0..u.n()).map(|j| cov[(i, j)]).collect())
            .collect(),
        rbar: u.expected_returns().map(|r| r.iter().copied().collect()),
        r0: u.risk_free_rate(),
    }
}

fn write_provenance(dir: &Path, loaded: &Loaded) -> Outcome<()> {
    if let Some(p) = &loaded.provenance {
        write_json(dir, "provenance.json", p)?;
        write_json(dir, "universe.json", &universe_json(&loaded.universe))?;
    }
    Ok(())
}

fn try_embed(u: &AssetUniverse) -> Option<EdmEmbedding> {
    match embed(u) {
        Ok(e) => Some(e),
        Err(e) => {
            log::warn!("no embedding: {e}");
            None
        }
    }
}

#[derive(Serialize)]
struct PortfolioOut {
    weights: Vec<f64>,
    sigma: f64,
    variance: f64,
    q: f64,
    c: Option<f64>,
    ret: Option<f64>,
}

impl From<&Portfolio> for PortfolioOut {
    fn from(p: &Portfolio) -> Self {
        PortfolioOut {
            weights: p.weights.clone(),
            sigma: p.sigma(),
            variance: p.variance,
            q: p.dr,
            c: p.centrality(),
            ret: p.expected_return,
        }
    }
}

#[derive(Serialize)]
struct PortfoliosOut<'a> {
    names: &'a [String],
    mvp: PortfolioOut,
    mdrp: PortfolioOut,
    q_portfolio: Option<PortfolioOut>,
    tangent: Option<PortfolioOut>,
    a: f64,
    b: Option<f64>,
    rho: f64,
    q_max: Option<f64>,
    eta_wo: Option<f64>,
    eta_wo_sign: Option<drfrontier::portfolios::EtaWoSign>,
    notes: Vec<String>,
}

fn cmd_portfolios(input: &InputArgs, out: &Path) -> Outcome<()> {
    let loaded = load(input)?;
    let u = &loaded.universe;
    let emb = try_embed(u);
    let sp = special_portfolios(u, emb.as_ref())?;
    let report = PortfoliosOut {
        names: u.names(),
        mvp: (&sp.mvp).into(),
        mdrp: (&sp.mdrp).into(),
        q_portfolio: sp.q_portfolio.as_ref().map(Into::into),
        tangent: sp.tangent.as_ref().map(Into::into),
        a: sp.a,
        b: sp.b,
        rho: sp.rho,
        q_max: emb.as_ref().map(|e| e.q_max()),
        eta_wo: sp.eta_wo,
        eta_wo_sign: sp.eta_wo_sign,
        notes: sp.notes.clone(),
    };
    write_provenance(out, &loaded)?;
    write_json(out, "portfolios.json", &report)
}

fn default_kinds(u: &AssetUniverse) -> Vec<CurveKind> {
    CurveKind::ALL
        .into_iter()
        .filter(|k| !k.needs_returns() || u.expected_returns().is_some())
        .filter(|k| !k.needs_risk_free() || u.risk_free_rate().is_some())
        .collect()
}

#[derive(Serialize)]
struct CurveSummary {
    rows: usize,
    failed: usize,
}

#[derive(Serialize)]
struct FrontierSummary {
    params: FrontierParams,
    q_max: Option<f64>,
    empirical_inflection: Option<f64>,
    curves: BTreeMap<&'static str, CurveSummary>,
}

fn cmd_frontier(
    input: &InputArgs,
    out: &Path,
    grid: Option<&GridSpec>,
    kinds: Option<&[String]>,
    emit_svg: bool,
) -> Outcome<()> {
    let loaded = load(input)?;
    let u = &loaded.universe;
    let fp = frontier_params(u)?;
    let emb = try_embed(u);
    let kinds = match kinds {
        Some(list) => list
            .iter()
            .map(|s| {
                CurveKind::from_slug(s.trim()).ok_or_else(|| Failure {
                    code: 2,
                    kind: "UnknownKind".into(),
                    message: format!(
                        "unknown curve kind {s:?}; expected one of {}",
                        CurveKind::ALL.map(|k| k.slug()).join(", ")
                    ),
                })
            })
            .collect::<Outcome<Vec<_>>>()?,
        None => default_kinds(u),
    };
    let sigmas = match grid {
        Some(g) => drfrontier::sigma_grid(g.min, g.max, g.points, g.log),
        None => drfrontier::default_grid(&fp, 200),
    };
    let mut curves = Vec::new();
    for kind in kinds {
        let curve = sweep(u, kind, &sigmas, emb.as_ref())?;
        write_file(out, &format!("frontier_{}.csv", kind.slug()), &curve.to_csv())?;
        curves.push(curve);
    }
    let summary = FrontierSummary {
        params: fp.clone(),
        q_max: emb.as_ref().map(|e| e.q_max()),
        empirical_inflection: curves
            .iter()
            .find(|c| c.kind == CurveKind::MVEfficientDR)
            .and_then(empirical_inflection),
        curves: curves
            .iter()
            .map(|c| {
                (
                    c.kind.slug(),
                    CurveSummary {
                        rows: c.rows.len(),
                        failed: c.rows.iter().filter(|r| r.status.is_error()).count(),
                    },
                )
            })
            .collect(),
    };
    write_provenance(out, &loaded)?;
    write_json(out, "frontier_summary.json", &summary)?;
    if emit_svg {
        write_plots(out, u, &fp, emb.as_ref(), &curves)?;
    }
    if !curves.is_empty() && curves.iter().all(FrontierCurve::all_failed) {
        return Err(Failure {
            code: 2,
            kind: "AllRowsFailed".into(),
            message: "every row of every requested curve failed".into(),
        });
    }
    Ok(())
}

fn series<F>(curves: &[FrontierCurve], pick: F) -> Vec<svg::Series>
where
    F: Fn(&drfrontier::CurveRow) -> Option<f64>,
{
    curves
        .iter()
        .enumerate()
        .map(|(i, c)| svg::Series {
            label: c.kind.slug().to_string(),
            dash: svg::dash(i),
            points: c.rows.iter().filter_map(|r| pick(r).map(|y| (r.sigma, y))).collect(),
        })
        .filter(|s| !s.points.is_empty())
        .collect()
}

fn write_plots(
    out: &Path,
    u: &AssetUniverse,
    fp: &FrontierParams,
    emb: Option<&EdmEmbedding>,
    curves: &[FrontierCurve],
) -> Outcome<()> {
    let sp = special_portfolios(u, emb)?;
    let mut q_markers = vec![
        svg::Marker {
            label: "MVP".into(),
            x: fp.sigma_mvp(),
            y: fp.q_mvp,
        },
        svg::Marker {
            label: "MDRP".into(),
            x: fp.sigma_mdrp(),
            y: fp.q_mdrp,
        },
    ];
    if let Some(q) = &sp.q_portfolio {
        q_markers.push(svg::Marker {
            label: "Q".into(),
            x: q.sigma(),
            y: q.dr,
        });
    }
    let plot = svg::Plot {
        title: "Diversification return against risk".into(),
        x_label: "sigma".into(),
        y_label: "q".into(),
        series: series(curves, |r| r.q),
        markers: q_markers,
        hlines: vec![],
    };
    write_file(out, "sigma_q.svg", &svg::render(&plot))?;

    let mut c_markers = Vec::new();
    for (label, p) in [("MVP", &sp.mvp), ("MDRP", &sp.mdrp)] {
        if let Some(c) = p.centrality() {
            c_markers.push(svg::Marker {
                label: label.into(),
                x: p.sigma(),
                y: c,
            });
        }
    }
    let plot = svg::Plot {
        title: "Centrality against risk".into(),
        x_label: "sigma".into(),
        y_label: "c".into(),
        series: series(curves, |r| r.centrality),
        markers: c_markers,
        hlines: emb
            .map(|e| svg::HLine {
                label: "sqrt(q_max)".into(),
                y: e.radius(),
            })
            .into_iter()
            .collect(),
    };
    write_file(out, "sigma_c.svg", &svg::render(&plot))?;

    let mut r_markers = Vec::new();
    for (label, p) in [("MVP", Some(&sp.mvp)), ("MDRP", Some(&sp.mdrp)), ("T", sp.tangent.as_ref())] {
        if let Some(ret) = p.and_then(|p| p.expected_return.map(|r| (p.sigma(), r))) {
            r_markers.push(svg::Marker {
                label: label.into(),
                x: ret.0,
                y: ret.1,
            });
        }
    }
    let plot = svg::Plot {
        title: "Expected return against risk".into(),
        x_label: "sigma".into(),
        y_label: "R".into(),
        series: series(curves, |r| r.expected_return),
        markers: r_markers,
        hlines: vec![],
    };
    write_file(out, "sigma_R.svg", &svg::render(&plot))
}

#[derive(Serialize)]
struct MdpOut<'a> {
    names: &'a [String],
    seed: u64,
    starts: usize,
    samples: usize,
    #[serde(flatten)]
    analysis: MdpAnalysis,
}

fn cmd_mdp(
    input: &InputArgs,
    out: &Path,
    seed: u64,
    starts: usize,
    samples: usize,
    sigmas: Option<&[f64]>,
) -> Outcome<()> {
    let loaded = load(input)?;
    let u = &loaded.universe;
    let levels: Vec<f64> = match sigmas {
        Some(s) => s.to_vec(),
        None => {
            let s = min_variance_portfolio(u)?.sigma();
            [1.02, 1.05, 1.1, 1.2, 1.35].iter().map(|k| k * s).collect()
        }
    };
    let analysis = mdp_analysis(u, starts, seed, &levels, samples)?;
    write_provenance(out, &loaded)?;
    write_json(
        out,
        "mdp.json",
        &MdpOut {
            names: u.names(),
            seed,
            starts,
            samples,
            analysis,
        },
    )
}

fn cmd_embed(input: &InputArgs, out: &Path) -> Outcome<()> {
    let loaded = load(input)?;
    let u = &loaded.universe;
    let emb = embed(u)?;
    let x = emb.coordinates();
    let mut csv = String::from("asset");
    for k in 1..=x.nrows() {
        csv.push_str(&format!(",dim{k}"));
    }
    csv.push('\n');
    for (j, name) in u.names().iter().enumerate() {
        csv.push_str(name);
        for k in 0..x.nrows() {
            csv.push(',');
            csv.push_str(&drfrontier::format::fmt_num(x[(k, j)]));
        }
        csv.push('\n');
    }
    write_provenance(out, &loaded)?;
    write_file(out, "embedding.csv", &csv)?;
    write_json(out, "embedding.json", &emb.summary())
}

fn cmd_ingest_check(input: &InputArgs, out: &Path) -> Outcome<()> {
    let loaded = load(input)?;
    write_json(out, "universe.json", &universe_json(&loaded.universe))?;
    if let Some(p) = &loaded.provenance {
        write_json(out, "provenance.json", p)?;
    }
    Ok(())
}

fn run(cli: Cli) -> Outcome<()> {
    match &cli.command {
        Command::Portfolios { input, output } => cmd_portfolios(input, &output.out),
        Command::Frontier {
            input,
            output,
            grid,
            kinds,
            svg,
        } => cmd_frontier(input, &output.out, grid.as_ref(), kinds.as_deref(), *svg),
        Command::Mdp {
            input,
            output,
            seed,
            starts,
            samples,
            sigmas,
        } => cmd_mdp(input, &output.out, *seed, *starts, *samples, sigmas.as_deref()),
        Command::Embed { input, output } => cmd_embed(input, &output.out),
        Command::IngestCheck { input, output } => cmd_ingest_check(input, &output.out),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("DRFRONTIER_LOG", "warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let body = serde_json::json!({
                "error": if f.code == 2 { "validation" } else { "io" },
                "kind": f.kind,
                "message": f.message,
            });
            eprintln!("{body}");
            ExitCode::from(f.code)
        }
    }
}
