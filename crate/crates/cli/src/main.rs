//! `gbubbles`: batch front end for the gaussian-bubbles toolkit.
//!
//! Settings come from flags or from a `key = value` file given with
//! `--config`; flags win. Every run writes one report (JSON by default)
//! that embeds the resolved settings and the tool version.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Parser, ValueEnum};
use gaussian_bubbles::frontflow::{self, OptimizeOptions, PolygonalNetwork};
use gaussian_bubbles::geometry::{barycenter_rank, SimplicialPartition};
use gaussian_bubbles::measure::{self, TRUNCATION_RADIUS};
use gaussian_bubbles::simplicial::{self, VolumeVector, GRADIENT_STEP, HESSIAN_STEP};
use gaussian_bubbles::stability::{self, CurveNetworkMesh};
use gaussian_bubbles::{report, verify, Error, VERSION};
use log::warn;
use serde_json::{json, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Command {
    SimplexCost,
    SolveShift,
    GradientCheck,
    HessianCheck,
    Spectrum,
    #[value(name = "optimize-1d")]
    Optimize1d,
    #[value(name = "optimize-2d")]
    Optimize2d,
    Barycenters,
    VerifyAll,
}

impl Command {
    fn name(self) -> String {
        self.to_possible_value().expect("no skipped variants").get_name().to_string()
    }
}

#[derive(Debug, Parser)]
#[command(name = "gbubbles", version, about = "Gaussian multi-bubble computations")]
struct Cli {
    /// Operation to run (may also come from the config file).
    command: Option<Command>,
    /// Plain-text `key = value` settings file; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Number of sets.
    #[arg(long)]
    m: Option<String>,
    /// Volume vector, comma separated.
    #[arg(long, allow_hyphen_values = true)]
    a: Option<String>,
    /// Zero-sum direction for derivative checks, comma separated.
    #[arg(long, allow_hyphen_values = true)]
    b: Option<String>,
    /// Finite-difference step.
    #[arg(long)]
    h: Option<String>,
    /// Relative tolerance (barycenter rank).
    #[arg(long)]
    tol: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    /// json or csv.
    #[arg(long)]
    format: Option<String>,
    /// Report path; standard output when absent.
    #[arg(long)]
    output: Option<String>,
    /// Plot-data CSV path (spectrum, optimize-2d).
    #[arg(long)]
    plot: Option<String>,
    #[arg(long)]
    max_breaks: Option<String>,
    #[arg(long)]
    steps: Option<String>,
    /// Nodes per edge.
    #[arg(long)]
    nodes: Option<String>,
    #[arg(long)]
    jitter: Option<String>,
    /// Initial network JSON for optimize-2d.
    #[arg(long)]
    init: Option<String>,
    /// tripod or slab (optimize-2d), circle, line or tripod (spectrum).
    #[arg(long)]
    shape: Option<String>,
    /// Circle radius for spectrum.
    #[arg(long)]
    radius: Option<String>,
    /// Snapshot interval for optimize-2d plot data.
    #[arg(long)]
    snapshot_every: Option<String>,
    /// Restrict spectrum to volume-preserving families.
    #[arg(long)]
    constrained: bool,
    /// Coarser meshes in verify-all.
    #[arg(long)]
    quick: bool,
}

const KEYS: [&str; 20] = [
    "command", "m", "a", "b", "h", "tol", "seed", "format", "output", "plot", "max-breaks", "steps", "nodes",
    "jitter", "init", "shape", "radius", "snapshot-every", "constrained", "quick",
];

#[derive(Debug)]
enum Failure {
    Usage(String),
    Lib(Error),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Lib(e) if e.is_validation() => 2,
            Failure::Lib(_) => 3,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Usage(m) => f.write_str(m),
            Failure::Lib(e) => write!(f, "{e}"),
        }
    }
}

type Run<T> = std::result::Result<T, Failure>;

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

/// Resolved settings: file values overridden by flags.
struct Settings(BTreeMap<String, String>);

impl Settings {
    fn resolve(cli: &Cli) -> Run<Self> {
        let mut map = BTreeMap::new();
        if let Some(path) = &cli.config {
            let text = std::fs::read_to_string(path)
                .map_err(|e| usage(format!("cannot read config {}: {e}", path.display())))?;
            for (n, raw) in text.lines().enumerate() {
                let line = raw.split('#').next().unwrap_or("").trim();
                if line.is_empty() {
                    continue;
                }
                let (k, v) = line
                    .split_once('=')
                    .ok_or_else(|| usage(format!("config line {}: expected key = value", n + 1)))?;
                let key = k.trim().replace('_', "-");
                if !KEYS.contains(&key.as_str()) {
                    return Err(usage(format!("config line {}: unknown key '{key}'", n + 1)));
                }
                map.insert(key, v.trim().to_string());
            }
        }
        let flags: [(&str, &Option<String>); 18] = [
            ("m", &cli.m),
            ("a", &cli.a),
            ("b", &cli.b),
            ("h", &cli.h),
            ("tol", &cli.tol),
            ("seed", &cli.seed),
            ("format", &cli.format),
            ("output", &cli.output),
            ("plot", &cli.plot),
            ("max-breaks", &cli.max_breaks),
            ("steps", &cli.steps),
            ("nodes", &cli.nodes),
            ("jitter", &cli.jitter),
            ("init", &cli.init),
            ("shape", &cli.shape),
            ("radius", &cli.radius),
            ("snapshot-every", &cli.snapshot_every),
            ("command", &None),
        ];
        for (k, v) in flags {
            if let Some(v) = v {
                map.insert(k.to_string(), v.clone());
            }
        }
        if let Some(c) = cli.command {
            map.insert("command".into(), c.name());
        }
        if cli.constrained {
            map.insert("constrained".into(), "true".into());
        }
        if cli.quick {
            map.insert("quick".into(), "true".into());
        }
        map.entry("seed".into()).or_insert_with(|| "0".into());
        map.entry("format".into()).or_insert_with(|| "json".into());
        Ok(Settings(map))
    }

    fn get<T: FromStr>(&self, key: &str) -> Run<Option<T>> {
        match self.0.get(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| usage(format!("cannot parse {key} = '{v}'"))),
        }
    }

    fn list(&self, key: &str) -> Run<Option<Vec<f64>>> {
        match self.0.get(key) {
            None => Ok(None),
            Some(v) => v
                .split(',')
                .map(|s| s.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map(Some)
                .map_err(|_| usage(format!("cannot parse {key} = '{v}' as a comma-separated list"))),
        }
    }

    fn flag(&self, key: &str) -> Run<bool> {
        Ok(self.get::<bool>(key)?.unwrap_or(false))
    }

    fn positive(&self, key: &str, default: f64) -> Run<f64> {
        let v = self.get::<f64>(key)?.unwrap_or(default);
        if !(v > 0.0) || !v.is_finite() {
            return Err(usage(format!("{key} must be positive, got {v}")));
        }
        Ok(v)
    }

    /// `m` and `a` together; `a` defaults to equal volumes. Sums within
    /// 1e-6 of 1 are renormalised with a warning.
    fn volumes(&self, default_m: usize) -> Run<VolumeVector> {
        let m: Option<usize> = self.get("m")?;
        match self.list("a")? {
            Some(a) => {
                if let Some(m) = m {
                    if m != a.len() {
                        return Err(usage(format!("m = {m} but a has {} entries", a.len())));
                    }
                }
                let (v, changed) = VolumeVector::renormalized(a, 1e-6)?;
                if changed {
                    warn!("volume vector renormalised to sum to 1");
                }
                Ok(v)
            }
            None => Ok(VolumeVector::uniform(m.unwrap_or(default_m))?),
        }
    }

    fn to_json(&self) -> Value {
        Value::Object(self.0.iter().map(|(k, v)| (k.clone(), Value::String(v.clone()))).collect())
    }
}

struct Report {
    result: Value,
    /// Command-specific CSV; the flattened result otherwise.
    csv: Option<String>,
    plot: Option<String>,
    failed: Option<String>,
}

impl Report {
    fn new(result: Value) -> Self {
        Report {
            result,
            csv: None,
            plot: None,
            failed: None,
        }
    }
}

fn flatten(prefix: &str, v: &Value, out: &mut Vec<(String, String)>) {
    let key = |k: &str| if prefix.is_empty() { k.to_string() } else { format!("{prefix}.{k}") };
    match v {
        Value::Object(map) => map.iter().for_each(|(k, x)| flatten(&key(k), x, out)),
        Value::Array(items) => items
            .iter()
            .enumerate()
            .for_each(|(i, x)| flatten(&key(&i.to_string()), x, out)),
        Value::Number(n) => out.push((
            prefix.to_string(),
            n.as_f64().map_or_else(|| n.to_string(), |f| {
                if n.is_f64() { format!("{f:.16e}") } else { n.to_string() }
            }),
        )),
        Value::Null => out.push((prefix.to_string(), String::new())),
        Value::Bool(b) => out.push((prefix.to_string(), b.to_string())),
        Value::String(s) => out.push((prefix.to_string(), s.replace(',', ";"))),
    }
}

fn to_value<T: serde::Serialize>(x: &T) -> Value {
    serde_json::from_str(&report::to_json_string(x)).expect("reports serialise to valid JSON")
}

fn simplex_cost(s: &Settings) -> Run<Report> {
    let a = s.volumes(3)?;
    let sol = simplicial::solve_shift(&a)?;
    let c = simplicial::cost(&a)?;
    Ok(Report::new(json!({
        "a": a.as_slice(),
        "cost": c.value,
        "abs_error_bound": c.abs_error_bound,
        "method": to_value(&c.method),
        "shift": sol.y,
        "volume_residual": sol.residual,
    })))
}

fn solve_shift(s: &Settings) -> Run<Report> {
    let a = s.volumes(3)?;
    let sol = simplicial::solve_shift(&a)?;
    let mv = simplicial::multipliers(&sol.y, a.m())?;
    let mut r = to_value(&sol);
    r["a"] = json!(a.as_slice());
    r["abs_error_bound"] = json!(sol.residual);
    r["multipliers"] = to_value(&mv);
    Ok(Report::new(r))
}

fn derivative(s: &Settings, second: bool) -> Run<Report> {
    let a = s.volumes(3)?;
    let b = s
        .list("b")?
        .ok_or_else(|| usage("derivative checks need a direction --b"))?;
    let h = s.positive("h", if second { HESSIAN_STEP } else { GRADIENT_STEP })?;
    let c = if second {
        simplicial::hessian_check(&a, &b, h)?
    } else {
        simplicial::gradient_check(&a, &b, h)?
    };
    if let Some(w) = &c.warning {
        warn!("{w}");
    }
    Ok(Report::new(to_value(&c)))
}

fn spectrum(s: &Settings) -> Run<Report> {
    let m: usize = s.get("m")?.unwrap_or(3);
    let shape = s
        .0
        .get("shape")
        .cloned()
        .unwrap_or_else(|| if m == 2 { "line".into() } else { "tripod".into() });
    let nodes: usize = s.get("nodes")?.unwrap_or(256);
    let mesh = match shape.as_str() {
        "circle" => CurveNetworkMesh::circle(s.positive("radius", 1.0)?, nodes)?,
        "line" | "tripod" => {
            let a = s.volumes(if shape == "line" { 2 } else { 3 })?;
            let y = simplicial::solve_shift(&a)?.y;
            let p = SimplicialPartition::with_shift(a.m(), &y)?;
            CurveNetworkMesh::from_partition(&p, TRUNCATION_RADIUS, nodes)?
        }
        other => return Err(usage(format!("unknown spectrum shape '{other}'"))),
    };
    let constrained = s.flag("constrained")?;
    let r = stability::fundamental_tone(&mesh, constrained)?;
    let mut out = Report::new(json!({
        "shape": shape,
        "nodes_per_edge": nodes,
        "tone": r.tone,
        "top_eigenvalues": r.top_eigenvalues,
        "constrained": r.constrained,
        "sign_constant": r.sign_constant,
        "dofs": r.dofs,
    }));
    let field = r.argmax_field.to_csv(&mesh);
    out.csv = Some(field.clone());
    out.plot = Some(field);
    Ok(out)
}

fn optimize_1d(s: &Settings) -> Run<Report> {
    let a = s.volumes(3)?;
    let max_breaks: usize = s.get("max-breaks")?.unwrap_or(frontflow::MAX_BREAKS);
    let r = frontflow::optimize_1d(a.m(), &a, max_breaks)?;
    let mut v = to_value(&r);
    v["a"] = json!(a.as_slice());
    v["volumes"] = json!(r.best.volumes(a.m()));
    Ok(Report::new(v))
}

fn optimize_2d(s: &Settings) -> Run<Report> {
    let a = s.volumes(3)?;
    let nodes: usize = s.get("nodes")?.unwrap_or(40);
    let init = match s.0.get("init") {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| usage(format!("cannot read {path}: {e}")))?;
            PolygonalNetwork::from_json(&text)?
        }
        None => match s.0.get("shape").map(String::as_str).unwrap_or("tripod") {
            "tripod" => PolygonalNetwork::tripod_for(&a, nodes)?,
            "slab" => {
                let t = frontflow::optimize_1d(3, &a, 2)?.best;
                PolygonalNetwork::slabs(&t.breakpoints, &t.labels, nodes, TRUNCATION_RADIUS)?
            }
            other => return Err(usage(format!("unknown network shape '{other}'"))),
        },
    };
    let steps: usize = s.get("steps")?.unwrap_or(2000);
    let seed: u64 = s.get("seed")?.unwrap_or(0);
    let opts = OptimizeOptions {
        jitter: s.get("jitter")?.unwrap_or(0.0),
        snapshot_every: s.get("snapshot-every")?.unwrap_or(if s.0.contains_key("plot") { 100 } else { 0 }),
        ..Default::default()
    };
    let r = frontflow::optimize_2d_with(&a, &init, steps, seed, &opts)?;
    let res = frontflow::first_variation_residual(&r.network)?;
    let vols = r.network.volumes();
    let vol_err = vols.iter().zip(a.as_slice()).map(|(v, t)| (v - t).abs()).fold(0.0, f64::max);
    let mut out = Report::new(json!({
        "a": a.as_slice(),
        "initial_cost": r.initial_cost,
        "cost": r.cost,
        "steps_taken": r.trace.len() - 1,
        "converged": r.converged,
        "topology_event": to_value(&r.event),
        "volumes": vols,
        "volume_error": vol_err,
        "residuals": to_value(&res),
        "trace": to_value(&r.trace),
        "network": to_value(&r.network),
    }));
    out.csv = Some(r.trace_csv());
    if opts.snapshot_every > 0 {
        let mut last = r.clone();
        last.snapshots.push((r.trace.last().map_or(0, |t| t.step), r.network.clone()));
        out.plot = Some(last.snapshots_csv());
    } else {
        out.plot = Some(r.network.to_plot_csv());
    }
    if let Some(ev) = &r.event {
        warn!("run stopped at a topology event: {ev:?}");
    }
    Ok(out)
}

fn barycenters(s: &Settings) -> Run<Report> {
    let a = s.volumes(3)?;
    let tol = s.positive("tol", 1e-8)?;
    let y = simplicial::solve_shift(&a)?.y;
    let p = SimplicialPartition::with_shift(a.m(), &y)?;
    let mut rows = vec![];
    let mut bounds = vec![];
    for i in 0..a.m() {
        let b = measure::sector_barycenter_flux(&p, i)?;
        rows.push(b.value.iter().copied().collect::<Vec<f64>>());
        bounds.push(b.abs_error_bound.iter().copied().collect::<Vec<f64>>());
    }
    let rank = barycenter_rank(&p.regions(), tol)?;
    Ok(Report::new(json!({
        "a": a.as_slice(),
        "shift": y,
        "barycenters": rows,
        "abs_error_bounds": bounds,
        "rank": rank.rank,
        "singular_values": rank.singular_values,
        "gap": if rank.gap().is_finite() { json!(rank.gap()) } else { json!("inf") },
        "volume_sum": rank.volume_sum,
    })))
}

fn verify_all(s: &Settings) -> Run<Report> {
    let quick = s.flag("quick")?;
    let outcomes = verify::run_all(quick);
    for o in &outcomes {
        eprintln!("{}", o.line());
    }
    let failed: Vec<usize> = outcomes.iter().filter(|o| !o.passed).map(|o| o.id).collect();
    let mut r = Report::new(json!({
        "quick": quick,
        "all_passed": failed.is_empty(),
        "criteria": to_value(&outcomes),
    }));
    if !failed.is_empty() {
        r.failed = Some(format!("acceptance criteria failed: {failed:?}"));
    }
    Ok(r)
}

fn write(path: Option<&String>, text: &str) -> Run<()> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| usage(format!("cannot write {p}: {e}"))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run(cli: &Cli) -> Run<Option<String>> {
    let s = Settings::resolve(cli)?;
    let command = match s.0.get("command") {
        Some(c) => Command::from_str(c, true).map_err(|_| usage(format!("unknown command '{c}'")))?,
        None => return Err(usage("no command given; see --help")),
    };
    let format = s.0["format"].clone();
    if format != "json" && format != "csv" {
        return Err(usage(format!("format must be json or csv, got '{format}'")));
    }
    let r = match command {
        Command::SimplexCost => simplex_cost(&s),
        Command::SolveShift => solve_shift(&s),
        Command::GradientCheck => derivative(&s, false),
        Command::HessianCheck => derivative(&s, true),
        Command::Spectrum => spectrum(&s),
        Command::Optimize1d => optimize_1d(&s),
        Command::Optimize2d => optimize_2d(&s),
        Command::Barycenters => barycenters(&s),
        Command::VerifyAll => verify_all(&s),
    }?;
    let doc = json!({
        "tool": "gbubbles",
        "version": VERSION,
        "command": command.name(),
        "config": s.to_json(),
        "result": r.result,
    });
    let text = if format == "json" {
        let mut t = report::to_json_pretty(&doc);
        if !t.ends_with('\n') {
            t.push('\n');
        }
        t
    } else if let Some(csv) = &r.csv {
        csv.clone()
    } else {
        let mut rows = vec![];
        flatten("", &doc, &mut rows);
        let mut t = String::from("key,value\n");
        for (k, v) in rows {
            t.push_str(&format!("{k},{v}\n"));
        }
        t
    };
    write(s.0.get("output"), &text)?;
    if let (Some(path), Some(plot)) = (s.0.get("plot"), &r.plot) {
        std::fs::write(path, plot).map_err(|e| usage(format!("cannot write {path}: {e}")))?;
    }
    Ok(r.failed)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(None) => ExitCode::SUCCESS,
        Ok(Some(msg)) => {
            eprintln!("gbubbles: {msg}");
            ExitCode::from(4)
        }
        Err(f) => {
            eprintln!("gbubbles: {f}");
            if let Failure::Usage(_) = f {
                eprintln!("run `gbubbles --help` for usage");
            }
            ExitCode::from(f.code())
        }
    }
}
