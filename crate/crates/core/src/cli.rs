//! Command-line front end. Every command prints one JSON report on stdout
//! (or a short text summary with `--pretty`) and exits with
//! 0 equal / 1 different / 2 parse error / 3 resource cap / 4 unknown.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::cellular::{
    adjacency_anchor, cells, graph_closure, CellularError, SearchLimits, WeakIsoSearch,
};
use crate::ctqw::{self, BasisMode, CtqwError, PenaltyKind, PenaltySpec, WalkOptions, WalkVerdict};
use crate::dtqw::{self, DtqwError};
use crate::extension::{self, ExtensionError, KEquivalence, KSearchLimits};
use crate::graphio::{self, srg_check, Graph, GraphError};
use crate::linalg::CharPoly;

pub const EXIT_EQUAL: i32 = 0;
pub const EXIT_DIFFERENT: i32 = 1;
pub const EXIT_PARSE: i32 = 2;
pub const EXIT_RESOURCE: i32 = 3;
pub const EXIT_UNKNOWN: i32 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{input}: {source}")]
    Graph { input: String, source: GraphError },
    #[error("cannot infer the format of '{0}'; use --format g6|el|name")]
    UnknownFormat(String),
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Dtqw(#[from] DtqwError),
    #[error(transparent)]
    Ctqw(#[from] CtqwError),
    #[error(transparent)]
    Extension(#[from] ExtensionError),
    #[error(transparent)]
    Cellular(#[from] CellularError),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io { .. } | CliError::Graph { .. } | CliError::UnknownFormat(_) | CliError::Usage(_) => {
                EXIT_PARSE
            }
            CliError::Dtqw(DtqwError::Edgeless | DtqwError::ZeroPower) => EXIT_PARSE,
            CliError::Ctqw(CtqwError::TooLarge { .. })
            | CliError::Extension(ExtensionError::TooLarge { .. })
            | CliError::Cellular(CellularError::NodeBudget { .. } | CellularError::TooManyColors { .. }) => {
                EXIT_RESOURCE
            }
            CliError::Ctqw(CtqwError::UnknownPenalty(_) | CtqwError::Argument(_)) => EXIT_PARSE,
            _ => EXIT_UNKNOWN,
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "cellwalk", version, about = "Cellular closures and quantum-walk graph invariants")]
pub struct Cli {
    /// Print a short human-readable summary instead of JSON.
    #[arg(long, global = true)]
    pub pretty: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum InputFormat {
    /// graph6 short form
    G6,
    /// edge list, optional `n <count>` header
    El,
    /// catalog name such as `rook(4)` or `petersen`
    Name,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Invariant {
    Dtqw,
    Ctqw,
    Wl,
    Kext,
}

#[derive(Args, Debug, Clone)]
pub struct WalkArgs {
    /// Number of particles (also the k of --invariant kext).
    #[arg(long, default_value_t = 2)]
    pub k: usize,
    /// Interaction penalty: none, pair or hubbard.
    #[arg(long, default_value = "pair")]
    pub penalty: String,
    /// Interaction strength U.
    #[arg(long, default_value_t = ctqw::DEFAULT_U)]
    pub u: f64,
    /// Evaluation times, comma separated.
    #[arg(long, value_delimiter = ',', default_values_t = ctqw::DEFAULT_TIMES)]
    pub times: Vec<f64>,
    /// Grid spacing used to round Green's-function values.
    #[arg(long, default_value_t = ctqw::DEFAULT_GRID)]
    pub tol: f64,
    /// Compare on the bosonic sector instead of the full product basis.
    #[arg(long)]
    pub symmetric_subspace: bool,
}

impl WalkArgs {
    fn options(&self) -> Result<WalkOptions, CliError> {
        let kind: PenaltyKind = self.penalty.parse()?;
        if self.times.is_empty() {
            return Err(CliError::Usage("--times needs at least one value".into()));
        }
        if self.tol.is_nan() || self.tol <= 0.0 {
            return Err(CliError::Usage("--tol must be positive".into()));
        }
        if self.k == 0 {
            return Err(CliError::Usage("--k must be at least 1".into()));
        }
        Ok(WalkOptions {
            k: self.k,
            penalty: PenaltySpec::Builtin { kind, u: if kind == PenaltyKind::None { 0.0 } else { self.u } },
            times: self.times.clone(),
            tol: self.tol,
            basis: if self.symmetric_subspace { BasisMode::Symmetric } else { BasisMode::Product },
        })
    }

    fn echo(&self) -> Value {
        json!({
            "k": self.k,
            "penalty": self.penalty,
            "u": self.u,
            "times": self.times,
            "tol": self.tol,
            "basis": if self.symmetric_subspace { "symmetric" } else { "product" },
        })
    }
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Cellular closure of a graph.
    Closure {
        input: String,
        #[arg(long, value_enum)]
        format: Option<InputFormat>,
    },
    /// Characteristic polynomial of S⁺(U^power) for the arc walk.
    Dtqw {
        input: String,
        #[arg(long, value_enum)]
        format: Option<InputFormat>,
        #[arg(long, default_value_t = 3)]
        power: u32,
    },
    /// Green's-function multisets of the k-Boson walk.
    Ctqw {
        input: String,
        #[arg(long, value_enum)]
        format: Option<InputFormat>,
        #[command(flatten)]
        walk: WalkArgs,
    },
    /// Compares two graphs under one invariant.
    Compare {
        a: String,
        b: String,
        #[arg(long, value_enum)]
        format: Option<InputFormat>,
        #[arg(long, value_enum)]
        invariant: Invariant,
        #[arg(long, default_value_t = 3)]
        power: u32,
        #[command(flatten)]
        walk: WalkArgs,
        /// Node budget for the weak-isomorphism searches.
        #[arg(long, default_value_t = 10_000_000)]
        max_nodes: u64,
    },
}

#[derive(Clone, Debug, Serialize)]
pub struct InputInfo {
    pub label: String,
    pub source: String,
    pub format: InputFormat,
    pub sha256: String,
    pub n: usize,
    pub edges: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub command: String,
    pub options: Value,
    pub inputs: Vec<InputInfo>,
    pub result: Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub verdict: Option<&'static str>,
    pub timings_ms: BTreeMap<String, f64>,
}

impl Report {
    /// Exit status implied by the verdict.
    pub fn exit_code(&self) -> i32 {
        match self.verdict {
            None | Some("equal") => EXIT_EQUAL,
            Some("different") => EXIT_DIFFERENT,
            _ => EXIT_UNKNOWN,
        }
    }
}

fn detect_format(input: &str) -> Result<InputFormat, CliError> {
    match Path::new(input).extension().and_then(|e| e.to_str()) {
        Some("g6") => Ok(InputFormat::G6),
        Some("el" | "edges" | "txt") => Ok(InputFormat::El),
        _ if !Path::new(input).exists() && graphio::named_graph(input).is_ok() => Ok(InputFormat::Name),
        _ => Err(CliError::UnknownFormat(input.to_string())),
    }
}

pub fn load_graph(label: &str, input: &str, format: Option<InputFormat>) -> Result<(Graph, InputInfo), CliError> {
    let format = match format {
        Some(f) => f,
        None => detect_format(input)?,
    };
    let bytes = match format {
        InputFormat::Name => input.as_bytes().to_vec(),
        _ => std::fs::read(input).map_err(|source| CliError::Io { path: input.to_string(), source })?,
    };
    let text = String::from_utf8_lossy(&bytes);
    let graph_err = |source| CliError::Graph { input: input.to_string(), source };
    let g = match format {
        InputFormat::G6 => graphio::parse_graph6(&text).map_err(graph_err)?,
        InputFormat::El => graphio::parse_edge_list(&text).map_err(graph_err)?,
        InputFormat::Name => graphio::named_graph(&text).map_err(graph_err)?,
    };
    let info = InputInfo {
        label: label.to_string(),
        source: input.to_string(),
        format,
        sha256: hex::encode(Sha256::digest(&bytes)),
        n: g.n(),
        edges: g.edge_count(),
    };
    Ok((g, info))
}

fn ms(start: Instant) -> f64 {
    (start.elapsed().as_secs_f64() * 1e6).round() / 1e3
}

fn closure_payload(g: &Graph) -> Value {
    let c = graph_closure(g);
    let cell_sizes: Vec<usize> = cells(&c).iter().map(|cell| cell.len()).collect();
    json!({
        "colors": c.r(),
        "cell_sizes": cell_sizes,
        "srg": srg_check(g),
        "configuration": c.to_json(),
    })
}

fn dtqw_payload(p: &CharPoly, power: u32) -> Value {
    json!({ "power": power, "degree": p.degree(), "charpoly": p.to_string(), "coefficients": p.to_strings() })
}

fn run_closure(input: &str, format: Option<InputFormat>) -> Result<Report, CliError> {
    let t0 = Instant::now();
    let (g, info) = load_graph("a", input, format)?;
    let load = ms(t0);
    let t1 = Instant::now();
    let result = closure_payload(&g);
    Ok(Report {
        command: "closure".into(),
        options: json!({}),
        inputs: vec![info],
        result,
        verdict: None,
        timings_ms: BTreeMap::from([("load".into(), load), ("invariant".into(), ms(t1))]),
    })
}

fn run_dtqw(input: &str, format: Option<InputFormat>, power: u32) -> Result<Report, CliError> {
    let t0 = Instant::now();
    let (g, info) = load_graph("a", input, format)?;
    let load = ms(t0);
    let t1 = Instant::now();
    let p = dtqw::support_spectrum_invariant(&g, power)?;
    Ok(Report {
        command: "dtqw".into(),
        options: json!({ "power": power }),
        inputs: vec![info],
        result: dtqw_payload(&p, power),
        verdict: None,
        timings_ms: BTreeMap::from([("load".into(), load), ("invariant".into(), ms(t1))]),
    })
}

fn run_ctqw(input: &str, format: Option<InputFormat>, walk: &WalkArgs) -> Result<Report, CliError> {
    let opts = walk.options()?;
    let t0 = Instant::now();
    let (g, info) = load_graph("a", input, format)?;
    let load = ms(t0);
    let t1 = Instant::now();
    let sets = ctqw::green_invariant(&g, &opts)?;
    let per_time: Vec<Value> = opts
        .times
        .iter()
        .zip(&sets)
        .map(|(t, m)| json!({ "t": t, "distinct": m.cells().len(), "total": m.total(), "multiset": m }))
        .collect();
    Ok(Report {
        command: "ctqw".into(),
        options: walk.echo(),
        inputs: vec![info],
        result: json!({ "green": per_time }),
        verdict: None,
        timings_ms: BTreeMap::from([("load".into(), load), ("invariant".into(), ms(t1))]),
    })
}

fn compare_dtqw(g: &Graph, g2: &Graph, power: u32) -> Result<(Value, &'static str), CliError> {
    let (pa, pb) = rayon::join(
        || dtqw::support_spectrum_invariant(g, power),
        || dtqw::support_spectrum_invariant(g2, power),
    );
    let (pa, pb) = (pa?, pb?);
    let witness = if pa.degree() != pb.degree() {
        Some(json!({ "degree_a": pa.degree(), "degree_b": pb.degree() }))
    } else {
        pa.coeffs().iter().zip(pb.coeffs()).position(|(x, y)| x != y).map(|i| {
            json!({ "index": i, "a": pa.coeffs()[i].to_string(), "b": pb.coeffs()[i].to_string() })
        })
    };
    let verdict = if witness.is_none() { "equal" } else { "different" };
    Ok((json!({ "a": dtqw_payload(&pa, power), "b": dtqw_payload(&pb, power), "witness": witness }), verdict))
}

fn compare_ctqw(g: &Graph, g2: &Graph, walk: &WalkArgs) -> Result<(Value, &'static str), CliError> {
    let opts = walk.options()?;
    let v = ctqw::distinguish(g, g2, &opts)?;
    let verdict = match v {
        WalkVerdict::Indistinguishable => "equal",
        WalkVerdict::Distinguished { .. } => "different",
    };
    Ok((json!({ "walk": v }), verdict))
}

fn compare_wl(g: &Graph, g2: &Graph, max_nodes: u64) -> Result<(Value, &'static str), CliError> {
    let (c1, c2) = rayon::join(|| graph_closure(g), || graph_closure(g2));
    let base = json!({ "colors_a": c1.r(), "colors_b": c2.r() });
    if g.n() != g2.n() || g.edge_count() != g2.edge_count() || c1.r() != c2.r() {
        return Ok((json!({ "closures": base, "weak_iso": null }), "different"));
    }
    let anchor = adjacency_anchor(g, &c1, g2, &c2)?;
    let limits = SearchLimits { max_colors: usize::MAX, max_nodes };
    let mut search = WeakIsoSearch::new(&c1, &c2, &[anchor], limits)?;
    let mut found = None;
    let outcome = search.run(|w| {
        found = Some(w.clone());
        std::ops::ControlFlow::Break(())
    });
    match outcome {
        Ok(_) => {
            let verdict = if found.is_some() { "equal" } else { "different" };
            let map = found.map(|w| (0..c1.r() as u32).map(|c| w.image(c)).collect::<Vec<_>>());
            Ok((json!({ "closures": base, "weak_iso": map, "explored": search.explored() }), verdict))
        }
        Err(CellularError::NodeBudget { explored, .. }) => {
            Ok((json!({ "closures": base, "weak_iso": null, "explored": explored, "max_nodes": max_nodes }), "unknown"))
        }
        Err(e) => Err(e.into()),
    }
}

fn compare_kext(g: &Graph, g2: &Graph, k: usize, max_nodes: u64) -> Result<(Value, &'static str), CliError> {
    let v = extension::k_equivalence_search(g, g2, k, KSearchLimits { max_nodes })?;
    let verdict = match v {
        KEquivalence::Equivalent { .. } => "equal",
        KEquivalence::NotEquivalent => "different",
        KEquivalence::Unknown { .. } => "unknown",
    };
    let mut payload = serde_json::to_value(&v).expect("serialisable");
    payload["k"] = json!(k);
    payload["max_nodes"] = json!(max_nodes);
    Ok((payload, verdict))
}

#[allow(clippy::too_many_arguments)]
fn run_compare(
    a: &str,
    b: &str,
    format: Option<InputFormat>,
    invariant: Invariant,
    power: u32,
    walk: &WalkArgs,
    max_nodes: u64,
) -> Result<Report, CliError> {
    let t0 = Instant::now();
    let (g, ia) = load_graph("a", a, format)?;
    let (g2, ib) = load_graph("b", b, format)?;
    let load = ms(t0);
    let t1 = Instant::now();
    let (result, verdict) = match invariant {
        Invariant::Dtqw => compare_dtqw(&g, &g2, power)?,
        Invariant::Ctqw => compare_ctqw(&g, &g2, walk)?,
        Invariant::Wl => compare_wl(&g, &g2, max_nodes)?,
        Invariant::Kext => compare_kext(&g, &g2, walk.k, max_nodes)?,
    };
    let options = match invariant {
        Invariant::Dtqw => json!({ "invariant": invariant, "power": power }),
        Invariant::Ctqw => json!({ "invariant": invariant, "walk": walk.echo() }),
        Invariant::Wl => json!({ "invariant": invariant, "max_nodes": max_nodes }),
        Invariant::Kext => json!({ "invariant": invariant, "k": walk.k, "max_nodes": max_nodes }),
    };
    Ok(Report {
        command: "compare".into(),
        options,
        inputs: vec![ia, ib],
        result,
        verdict: Some(verdict),
        timings_ms: BTreeMap::from([("load".into(), load), ("invariant".into(), ms(t1))]),
    })
}

pub fn execute(cli: &Cli) -> Result<Report, CliError> {
    match &cli.command {
        Command::Closure { input, format } => run_closure(input, *format),
        Command::Dtqw { input, format, power } => run_dtqw(input, *format, *power),
        Command::Ctqw { input, format, walk } => run_ctqw(input, *format, walk),
        Command::Compare { a, b, format, invariant, power, walk, max_nodes } => {
            run_compare(a, b, *format, *invariant, *power, walk, *max_nodes)
        }
    }
}

/// Short text rendering of a report.
pub fn render_pretty(r: &Report) -> String {
    let mut out = String::new();
    for i in &r.inputs {
        out += &format!("{} = {} ({} vertices, {} edges)\n", i.label, i.source, i.n, i.edges);
    }
    let res = &r.result;
    match r.command.as_str() {
        "closure" => {
            out += &format!("colors: {}\ncells: {}\n", res["colors"], res["cell_sizes"]);
            if !res["srg"].is_null() {
                out += &format!("strongly regular: {}\n", res["srg"]);
            }
        }
        "dtqw" => out += &format!("charpoly of S+(U^{}): {}\n", res["power"], res["charpoly"].as_str().unwrap_or("")),
        "ctqw" => {
            for e in res["green"].as_array().into_iter().flatten() {
                out += &format!("t = {}: {} distinct values over {} entries\n", e["t"], e["distinct"], e["total"]);
            }
        }
        _ => out += &format!("{}\n", serde_json::to_string(res).unwrap_or_default()),
    }
    if let Some(v) = r.verdict {
        out += &format!("verdict: {v}\n");
    }
    out
}
