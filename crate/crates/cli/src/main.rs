mod config;
mod error;
mod plot;

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use chrono::{SecondsFormat, Utc};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use entroute::analytics::{
    avg_path_length_heuristic, connectivity_threshold, expected_paths, mean_edge_prob,
    path_prob_correlation, WaxmanAnalyticParams,
};
use entroute::generate::{WaxmanSpec, DEFAULT_ALPHA_L_KM};
use entroute::io::{
    read_average_csv, read_rate_csv, topology_to_string, write_average_csv, write_rate_csv,
    AVERAGE_CSV_HEADER, RATE_CSV_HEADER,
};
use entroute::montecarlo::{average_rate, rate_vs_distance, with_threads};
use entroute::LinkParams;

use config::{Config, List, TopologySection};
use error::CliError;
use plot::{average_chart, average_x_auto, distance_chart, render, AverageX, Chart};

#[derive(Parser)]
#[command(name = "entroute", version, about = "Multipartite entanglement routing simulator")]
struct Cli {
    /// Master seed; overrides the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (0 = all cores). Results do not depend on it.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    /// Directory for output files.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Output format for results: CSV only, or CSV plus SVG charts.
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Svg,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a physical topology and write it in the native text format.
    Generate(GenerateArgs),
    /// Run the experiments described by a config file (or a run manifest).
    Run {
        config: PathBuf,
    },
    /// Average-rate sweep over q and network size.
    Sweep(SweepArgs),
    /// Print the analytic quantities of a Waxman network.
    Analyze(AnalyzeArgs),
    /// Render a result CSV as an SVG chart.
    Plot(PlotArgs),
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long, value_parser = ["grid", "waxman", "scalefree", "file"])]
    kind: String,
    /// Grid side length.
    #[arg(long)]
    side: Option<usize>,
    #[arg(long)]
    nodes: Option<usize>,
    #[arg(long, default_value_t = 100.0)]
    region_km: f64,
    #[arg(long, conflicts_with = "alpha")]
    alpha_l_km: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    beta: f64,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    m0: Option<usize>,
    #[arg(long, default_value_t = 1.0)]
    mu: f64,
    #[arg(long, default_value_t = 1.0)]
    nu: f64,
    /// GML or native topology to convert (kind = file).
    #[arg(long)]
    input: Option<PathBuf>,
    /// Output file; defaults to topology.txt in the output directory.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    config: PathBuf,
    /// q values, comma-separated; replaces the config list.
    #[arg(long, value_delimiter = ',')]
    q: Vec<f64>,
    /// Grid sides or node counts, comma-separated; replaces the config list.
    #[arg(long, value_delimiter = ',')]
    sizes: Vec<usize>,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[arg(long, default_value_t = 100)]
    nodes: u64,
    #[arg(long, default_value_t = 100.0)]
    region_km: f64,
    #[arg(long, default_value_t = DEFAULT_ALPHA_L_KM)]
    alpha_l_km: f64,
    #[arg(long, default_value_t = 1.0)]
    beta: f64,
    #[arg(long, default_value_t = 0.2)]
    gamma: f64,
    #[arg(long, default_value_t = 1)]
    attempts: u32,
    /// Monte Carlo samples per estimate.
    #[arg(long, default_value_t = 1_000_000)]
    samples: u64,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum XAxis {
    Auto,
    Nodes,
    Q,
}

#[derive(Args)]
struct PlotArgs {
    csv: PathBuf,
    /// x axis for average-rate files.
    #[arg(long, value_enum, default_value_t = XAxis::Auto)]
    x: XAxis,
    #[arg(long)]
    log_y: bool,
    /// Output file; defaults to the CSV name with an .svg extension.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Validation(msg.into())
}

/// Writes through a temporary file in the target directory, then renames,
/// so readers never see a partial file.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let name = path.file_name().ok_or_else(|| invalid(format!("{} is not a file path", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    let result = fs::File::create(&tmp)
        .and_then(|mut f| f.write_all(bytes).and_then(|_| f.sync_all()))
        .and_then(|_| fs::rename(&tmp, path));
    if let Err(e) = result {
        let _ = fs::remove_file(&tmp);
        return Err(CliError::io(path, e));
    }
    Ok(())
}

fn thread_count(requested: usize) -> usize {
    if requested > 0 {
        requested
    } else {
        std::thread::available_parallelism().map_or(1, |n| n.get())
    }
}

fn now() -> String {
    Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true)
}

#[derive(Serialize)]
struct OutputFile {
    file: String,
    rows: usize,
}

#[derive(Serialize)]
struct RunManifest<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'a str,
    seed: u64,
    threads: usize,
    started: String,
    finished: String,
    config: &'a Config,
    outputs: Vec<OutputFile>,
}

struct Session {
    out_dir: PathBuf,
    threads: usize,
    format: Format,
}

impl Session {
    fn path(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }

    fn emit_svg(&self, name: &str, chart: &Chart) -> Result<(), CliError> {
        let (svg, warnings) = render(chart);
        for w in warnings {
            eprintln!("warning: {name}: {w}");
        }
        write_atomic(&self.path(name), svg.as_bytes())?;
        println!("wrote {}", self.path(name).display());
        Ok(())
    }
}

fn csv_bytes(write: impl FnOnce(&mut Vec<u8>) -> Result<(), entroute::io::IoError>) -> Result<Vec<u8>, CliError> {
    let mut buf = Vec::new();
    write(&mut buf).map_err(|e| CliError::Io(e.to_string()))?;
    Ok(buf)
}

/// Runs every experiment of `config` and writes results plus the manifest.
fn execute(session: &Session, command: &str, mut config: Config, seed: u64) -> Result<(), CliError> {
    config.seed = Some(seed);
    let sizes = config.sizes()?;
    let outputs = config.outputs.clone();
    if !outputs.average && !outputs.distance {
        return Err(invalid("no outputs requested (set outputs.average or outputs.distance)"));
    }
    if outputs.distance && sizes.len() > 1 {
        return Err(invalid("rate-vs-distance output needs a single topology size"));
    }
    // build every experiment first so that bad values fail before any work
    let mut average_cfgs = Vec::new();
    if outputs.average {
        for &size in &sizes {
            average_cfgs.push(config.experiment(size, |s| config.average_plan(s), seed)?);
        }
    }
    let distance_cfg = if outputs.distance {
        Some(config.experiment(sizes[0], |_| Ok(config.distance_plan()), seed)?)
    } else {
        None
    };

    let started = now();
    let threads = thread_count(session.threads);
    let (averages, distances) = with_threads(threads, || -> Result<_, CliError> {
        let mut averages = Vec::new();
        for cfg in &average_cfgs {
            averages.extend(average_rate(cfg)?);
        }
        let distances = distance_cfg.as_ref().map(rate_vs_distance).transpose()?;
        Ok((averages, distances))
    })?;
    let finished = now();

    let mut files = Vec::new();
    if outputs.average {
        let bytes = csv_bytes(|b| write_average_csv(&averages, b))?;
        write_atomic(&session.path("average.csv"), &bytes)?;
        println!("wrote {} ({} rows)", session.path("average.csv").display(), averages.len());
        files.push(OutputFile { file: "average.csv".into(), rows: averages.len() });
        if session.format == Format::Svg {
            let rows = read_average_csv(bytes.as_slice()).map_err(|e| CliError::Io(e.to_string()))?;
            session.emit_svg("average.svg", &average_chart(&rows, average_x_auto(&rows), false))?;
            files.push(OutputFile { file: "average.svg".into(), rows: rows.len() });
        }
    }
    if let Some(records) = distances {
        let bytes = csv_bytes(|b| write_rate_csv(&records, b))?;
        write_atomic(&session.path("distance.csv"), &bytes)?;
        println!("wrote {} ({} rows)", session.path("distance.csv").display(), records.len());
        files.push(OutputFile { file: "distance.csv".into(), rows: records.len() });
        if session.format == Format::Svg {
            let rows = read_rate_csv(bytes.as_slice()).map_err(|e| CliError::Io(e.to_string()))?;
            session.emit_svg("distance.svg", &distance_chart(&rows, false))?;
            files.push(OutputFile { file: "distance.svg".into(), rows: rows.len() });
        }
    }

    let manifest = RunManifest {
        tool: "entroute",
        version: env!("CARGO_PKG_VERSION"),
        command,
        seed,
        threads,
        started,
        finished,
        config: &config,
        outputs: files,
    };
    let json = serde_json::to_string_pretty(&manifest).map_err(|e| CliError::Io(e.to_string()))?;
    write_atomic(&session.path("manifest.json"), format!("{json}\n").as_bytes())?;
    println!("wrote {}", session.path("manifest.json").display());
    Ok(())
}

fn cmd_run(cli: &Cli, session: &Session, path: &Path) -> Result<(), CliError> {
    let config = Config::load(path)?;
    let seed = cli.seed.or(config.seed).unwrap_or(0);
    execute(session, "run", config, seed)
}

fn cmd_sweep(cli: &Cli, session: &Session, args: &SweepArgs) -> Result<(), CliError> {
    let mut config = Config::load(&args.config)?;
    if !args.q.is_empty() {
        config.strategies.q = List(args.q.clone());
    }
    if !args.sizes.is_empty() {
        let list = Some(List(args.sizes.clone()));
        match config.topology.kind.as_str() {
            "grid" => config.topology.side = list,
            "waxman" | "scalefree" => config.topology.nodes = list,
            other => return Err(invalid(format!("cannot sweep sizes of a '{other}' topology"))),
        }
    }
    config.outputs.average = true;
    config.outputs.distance = false;
    let seed = cli.seed.or(config.seed).unwrap_or(0);
    execute(session, "sweep", config, seed)
}

fn cmd_generate(cli: &Cli, session: &Session, args: &GenerateArgs) -> Result<(), CliError> {
    let section = TopologySection {
        kind: args.kind.clone(),
        side: args.side.map(|s| List(vec![s])),
        nodes: args.nodes.map(|n| List(vec![n])),
        region_km: args.region_km,
        alpha: args.alpha,
        alpha_l_km: args.alpha_l_km,
        beta: args.beta,
        m: args.m,
        m0: args.m0,
        mu: args.mu,
        nu: args.nu,
        path: args.input.clone(),
        name: None,
    };
    let size = section.sizes()?[0];
    let spec = section.spec(size)?;
    let topo = spec
        .instantiate(cli.seed.unwrap_or(0), 0)
        .map_err(|e| invalid(e.to_string()))?;
    let out = args.output.clone().unwrap_or_else(|| session.path("topology.txt"));
    write_atomic(&out, topology_to_string(&topo).as_bytes())?;
    println!("nodes {} edges {}", topo.node_count(), topo.edge_count());
    println!("wrote {}", out.display());
    Ok(())
}

fn cmd_analyze(cli: &Cli, session: &Session, args: &AnalyzeArgs, out_dir: bool) -> Result<(), CliError> {
    let spec_err = |e: entroute::generate::SpecError| invalid(e.to_string());
    let n = usize::try_from(args.nodes).map_err(|_| invalid("node count too large"))?;
    let waxman = WaxmanSpec::with_alpha_l(n, args.region_km, args.alpha_l_km, args.beta).map_err(spec_err)?;
    let link = LinkParams::new(args.gamma, args.attempts).map_err(|e| invalid(e.to_string()))?;
    let params = WaxmanAnalyticParams::new(waxman, link)?;
    let seed = cli.seed.unwrap_or(0);

    let (e, rho) = with_threads(thread_count(session.threads), || -> Result<_, CliError> {
        Ok((
            mean_edge_prob(&params, args.samples, seed)?,
            path_prob_correlation(&params, args.samples, seed)?,
        ))
    })?;
    let paths = expected_paths(args.nodes, e.value)?;
    let threshold = connectivity_threshold(args.nodes).ok();
    let degree = e.value * (args.nodes as f64 - 1.0);
    let hops = avg_path_length_heuristic(args.nodes as f64, degree).ok();

    let sci = |v: f64| format!("{v:.6e}");
    let opt = |v: Option<f64>| v.map_or_else(|| "n/a".to_string(), sci);
    let paths_value = if paths.e_paths.is_finite() {
        sci(paths.e_paths)
    } else {
        format!("exp({:.6})", paths.log_e_paths)
    };
    let rows: Vec<(&str, String, String)> = vec![
        ("mean edge probability E", sci(e.value), sci(e.stderr)),
        ("expected mean degree", sci(degree), String::new()),
        ("expected paths (series)", paths_value, String::new()),
        ("expected paths lower bound", opt(paths.lower), String::new()),
        ("expected paths upper bound", sci(paths.upper), String::new()),
        ("expected paths asymptote", sci(paths.asymptotic), String::new()),
        ("asymptote minus series", sci(paths.residual), String::new()),
        ("asymptote minus lower bound", opt(paths.lower_offset()), String::new()),
        ("asymptote minus upper bound", sci(paths.upper_offset()), String::new()),
        ("bounds hold", paths.bounds_hold().to_string(), String::new()),
        ("connectivity threshold E* (leading order)", opt(threshold), String::new()),
        ("E / E*", opt(threshold.map(|t| e.value / t)), String::new()),
        ("mean hop count (ln N / ln k)", opt(hops), String::new()),
        (
            "path-probability correlation rho",
            opt(rho.map(|r| r.value)),
            rho.map_or(String::new(), |r| sci(r.stderr)),
        ),
    ];

    println!(
        "Waxman N={} L={} km alpha_L={} km beta={} gamma={} dB/km attempts={} samples={} seed={}",
        args.nodes, args.region_km, args.alpha_l_km, args.beta, args.gamma, args.attempts, args.samples, seed
    );
    println!("{:<44} {:>16} {:>14}", "quantity", "value", "stderr");
    for (name, value, err) in &rows {
        println!("{name:<44} {value:>16} {err:>14}");
    }

    if out_dir {
        let mut w = csv_writer(Vec::new());
        let mut push = |r: [&str; 3]| w.write_record(r).map_err(|e| CliError::Io(e.to_string()));
        push(["quantity", "value", "stderr"])?;
        for (name, value, err) in &rows {
            push([name, value, err])?;
        }
        let bytes = w.into_inner().map_err(|e| CliError::Io(e.to_string()))?;
        write_atomic(&session.path("analysis.csv"), &bytes)?;
        println!("wrote {}", session.path("analysis.csv").display());
    }
    Ok(())
}

fn csv_writer(buf: Vec<u8>) -> csv::Writer<Vec<u8>> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(buf)
}

enum CsvKind {
    Rate,
    Average,
    Empty,
}

fn detect(text: &str) -> Result<CsvKind, CliError> {
    let Some(first) = text.lines().next().filter(|l| !l.trim().is_empty()) else {
        return Ok(CsvKind::Empty);
    };
    let cols: Vec<&str> = first.trim_end_matches('\r').split(',').collect();
    if cols == RATE_CSV_HEADER {
        Ok(CsvKind::Rate)
    } else if cols == AVERAGE_CSV_HEADER {
        Ok(CsvKind::Average)
    } else {
        Err(invalid(format!("unrecognised CSV header '{first}'")))
    }
}

fn cmd_plot(session: &Session, args: &PlotArgs, out_dir: bool) -> Result<(), CliError> {
    let text = fs::read_to_string(&args.csv).map_err(|e| CliError::io(&args.csv, e))?;
    let bad = |e: entroute::io::IoError| invalid(format!("{}: {e}", args.csv.display()));
    let chart = match detect(&text)? {
        CsvKind::Rate => distance_chart(&read_rate_csv(text.as_bytes()).map_err(bad)?, args.log_y),
        CsvKind::Average => {
            let rows = read_average_csv(text.as_bytes()).map_err(bad)?;
            let x = match args.x {
                XAxis::Auto => average_x_auto(&rows),
                XAxis::Nodes => AverageX::Nodes,
                XAxis::Q => AverageX::Q,
            };
            average_chart(&rows, x, args.log_y)
        }
        CsvKind::Empty => average_chart(&[], AverageX::Q, args.log_y),
    };
    let out = match &args.output {
        Some(p) => p.clone(),
        None => {
            let name = args.csv.with_extension("svg");
            if out_dir {
                session.path(&name.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default())
            } else {
                name
            }
        }
    };
    let (svg, warnings) = render(&chart);
    for w in warnings {
        eprintln!("warning: {}: {w}", args.csv.display());
    }
    write_atomic(&out, svg.as_bytes())?;
    println!("wrote {}", out.display());
    Ok(())
}

fn dispatch(cli: &Cli) -> Result<(), CliError> {
    let session = Session {
        out_dir: cli.out_dir.clone().unwrap_or_else(|| PathBuf::from(".")),
        threads: cli.threads,
        format: cli.format,
    };
    match &cli.command {
        Command::Generate(args) => cmd_generate(cli, &session, args),
        Command::Run { config } => cmd_run(cli, &session, config),
        Command::Sweep(args) => cmd_sweep(cli, &session, args),
        Command::Analyze(args) => cmd_analyze(cli, &session, args, cli.out_dir.is_some()),
        Command::Plot(args) => cmd_plot(&session, args, cli.out_dir.is_some()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
