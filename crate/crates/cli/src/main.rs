use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;
use sha2::{Digest, Sha256};

use sparsity_probe::clustering::cluster_and_score;
use sparsity_probe::dataset::io::{read_csv, write_csv};
use sparsity_probe::dataset::synth::{generate_raw, SyntheticKind, SyntheticSpec};
use sparsity_probe::dataset::normalize;
use sparsity_probe::oracle::{
    adaptive_cube_tree, crossing_tau, dyadic_level_sums_many, CubeFunction, SmoothDomain, MAX_LEVEL,
};
use sparsity_probe::probe::{run_and_write, Layer, LayerStack, ProbeParams, ProbeReport, Provenance};
use sparsity_probe::sparsity::{forest_sparsity, CurveScale, GridSpec};
use sparsity_probe::wavelet::MeasureMode;
use sparsity_probe::{Error, ErrorKind};

#[derive(Parser, Debug)]
#[command(name = "sparsity-probe", version, about = "Geometric-wavelet sparsity probe")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true, env = "SPARSITY_PROBE_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic dataset as CSV plus a one-layer raw stack.
    Synth(SynthArgs),
    /// Probe a single dataset (CSV file or a stack directory).
    ProbeDataset(ProbeArgs),
    /// Probe every layer listed in a manifest.
    ProbeStack(ProbeArgs),
    /// Run the dyadic or adaptive-cube oracle.
    Oracle(OracleArgs),
    /// KMeans validity indices for every layer.
    Cluster(ClusterArgs),
}

#[derive(Args, Debug)]
struct SynthArgs {
    /// spiral | circles | gq | clusters
    #[arg(long)]
    kind: String,
    #[arg(long, default_value_t = 1000)]
    m: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Noise level (default depends on the kind).
    #[arg(long)]
    noise: Option<f64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct ProbeArgs {
    /// Manifest, directory holding `manifest.json`, or (probe-dataset only) a CSV file.
    input: PathBuf,
    /// Number of probe seeds; seeds are `seed-base .. seed-base + seeds`.
    #[arg(long, default_value_t = 3)]
    seeds: usize,
    #[arg(long, default_value_t = 0)]
    seed_base: u64,
    #[arg(long, default_value_t = 3)]
    trees: usize,
    #[arg(long, default_value_t = 15)]
    depth: usize,
    #[arg(long, default_value_t = 0.1)]
    eps_low: f64,
    #[arg(long, default_value_t = 0.4)]
    eps_high: f64,
    #[arg(long, default_value_t = 0.05)]
    tau_min: f64,
    #[arg(long, default_value_t = 1.95)]
    tau_max: f64,
    #[arg(long, default_value_t = 100)]
    tau_points: usize,
    /// empirical | lebesgue-boxed
    #[arg(long, default_value = "empirical")]
    measure: String,
    /// log | unit-square | raw
    #[arg(long, default_value = "log")]
    scale: String,
    /// Random-project layers wider than this.
    #[arg(long)]
    project: Option<usize>,
    /// Attach KMeans indices with this many clusters.
    #[arg(long)]
    cluster_k: Option<usize>,
    /// Report path; curve CSVs go to `<stem>_curves/` beside it.
    #[arg(long, default_value = "report.json")]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct OracleArgs {
    /// disc | ellipse | rounded-square
    #[arg(long, conflicts_with = "cubes")]
    shape: Option<String>,
    /// Number of boxes for the adaptive-tree oracle.
    #[arg(long)]
    cubes: Option<usize>,
    #[arg(long, value_delimiter = ',', required = true)]
    tau: Vec<f64>,
    #[arg(long, default_value_t = 20)]
    levels: usize,
    /// Directory for level-sum and boundary-count CSVs.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ClusterArgs {
    input: PathBuf,
    /// Cluster count (default: number of classes).
    #[arg(long)]
    k: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn exit_code(err: &Error) -> u8 {
    match err.kind() {
        ErrorKind::Parameter => 2,
        ErrorKind::Validation => 3,
        ErrorKind::Numerical => 4,
        ErrorKind::Io => 1,
    }
}

fn error_json(err: &Error) -> serde_json::Value {
    let kind = match err.kind() {
        ErrorKind::Parameter => "parameter",
        ErrorKind::Validation => "validation",
        ErrorKind::Numerical => "numerical",
        ErrorKind::Io => "io",
    };
    let mut body = json!({ "kind": kind, "message": err.to_string() });
    if let Error::Layer { layer, .. } = err {
        body["layer"] = json!(layer);
    }
    json!({ "error": body })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprintln!("{}", json!({ "error": { "kind": "argument", "message": e.to_string().trim_end() } }));
            return ExitCode::from(2);
        }
    };
    if let Some(n) = cli.threads {
        if n == 0 {
            let err = Error::Config("--threads must be at least 1".into());
            eprintln!("{}", error_json(&err));
            return ExitCode::from(2);
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().expect("thread pool is configured once");
    }
    let result = match cli.command {
        Command::Synth(a) => cmd_synth(a),
        Command::ProbeDataset(a) => cmd_probe(a, true),
        Command::ProbeStack(a) => cmd_probe(a, false),
        Command::Oracle(a) => cmd_oracle(a),
        Command::Cluster(a) => cmd_cluster(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("{}", error_json(&err));
            ExitCode::from(exit_code(&err))
        }
    }
}

fn io_err(path: &Path, e: std::io::Error) -> Error {
    Error::Io { path: path.to_path_buf(), source: e }
}

fn sha256_file(path: &Path) -> Result<String, Error> {
    let bytes = fs::read(path).map_err(|e| io_err(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

fn cmd_synth(a: SynthArgs) -> Result<(), Error> {
    let kind = SyntheticKind::from_name(&a.kind)?;
    let mut spec = SyntheticSpec::new(kind, a.seed).with_samples(a.m);
    if let Some(noise) = a.noise {
        spec = spec.with_noise(noise);
    }
    let raw = generate_raw(&spec)?;
    fs::create_dir_all(&a.out).map_err(|e| io_err(&a.out, e))?;
    let csv_path = a.out.join("data.csv");
    write_csv(&csv_path, &raw.features, &raw.class_ids)?;
    let mut provenance = Provenance { model: Some(format!("synthetic/{}", a.kind)), seed: Some(a.seed), ..Default::default() };
    provenance.extra.insert("spec".into(), serde_json::to_value(&spec).expect("spec serializes"));
    let stack = LayerStack::new(
        vec![Layer { name: "input".into(), features: raw.features }],
        raw.class_ids,
        Some(raw.n_classes),
    )?
    .with_provenance(provenance);
    let manifest = stack.save(&a.out)?;

    let mut files: Vec<PathBuf> = fs::read_dir(&a.out)
        .map_err(|e| io_err(&a.out, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file())
        .collect();
    files.sort();
    let mut digests = serde_json::Map::new();
    let mut all = Sha256::new();
    for f in &files {
        let d = sha256_file(f)?;
        all.update(d.as_bytes());
        digests.insert(f.file_name().unwrap().to_string_lossy().into_owned(), json!(d));
    }
    let out = json!({
        "csv": csv_path,
        "manifest": manifest,
        "files": digests,
        "digest": hex::encode(all.finalize()),
    });
    println!("{}", serde_json::to_string_pretty(&out).expect("json"));
    Ok(())
}

fn load_input(path: &Path, allow_csv: bool) -> Result<(LayerStack, String), Error> {
    let is_csv = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    if is_csv {
        if !allow_csv {
            return Err(Error::Config("probe-stack takes a manifest; use probe-dataset for CSV files".into()));
        }
        let data = read_csv(path)?;
        let stack = LayerStack::new(vec![Layer { name: "input".into(), features: data.features }], data.class_ids, None)?;
        return Ok((stack, path.display().to_string()));
    }
    let stack = LayerStack::load(path)?;
    Ok((stack, path.display().to_string()))
}

fn probe_params(a: &ProbeArgs) -> Result<(ProbeParams, Vec<u64>), Error> {
    if a.seeds == 0 {
        return Err(Error::Config("--seeds must be at least 1".into()));
    }
    let mut params = ProbeParams::default();
    params.forest.n_trees = a.trees;
    params.forest.max_depth = a.depth;
    params.estimator.eps_low = a.eps_low;
    params.estimator.eps_high = a.eps_high;
    params.estimator.scale = CurveScale::from_name(&a.scale)?;
    params.grid = GridSpec { min: a.tau_min, max: a.tau_max, points: a.tau_points };
    params.measure = MeasureMode::from_name(&a.measure)?;
    params.projection_dim = a.project;
    params.clustering_k = a.cluster_k;
    params.validate()?;
    let seeds = (0..a.seeds as u64).map(|i| a.seed_base + i).collect();
    Ok((params, seeds))
}

fn print_summary(report: &ProbeReport, path: &Path) {
    println!("{}", report.settings);
    for l in &report.layers {
        let std = l.tau_star.std.map_or(String::new(), |s| format!(" ± {s:.4}"));
        let flags = match (l.degenerate, l.fallback_count) {
            (true, _) => " [degenerate]".to_string(),
            (false, 0) => String::new(),
            (false, n) => format!(" [fallback x{n}]"),
        };
        println!(
            "{:<24} n={:<6} tau*={:.4}{std}  alpha*={:.4}{flags}",
            l.name, l.n_features, l.tau_star.mean, l.alpha_star.mean
        );
    }
    println!("report: {}", path.display());
}

fn cmd_probe(a: ProbeArgs, single: bool) -> Result<(), Error> {
    let (params, seeds) = probe_params(&a)?;
    let (stack, input) = load_input(&a.input, single)?;
    if single && stack.layers.len() != 1 {
        return Err(Error::Config(format!(
            "probe-dataset expects one layer, manifest lists {}; use probe-stack",
            stack.layers.len()
        )));
    }
    if let Some(parent) = a.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| io_err(parent, e))?;
    }
    let report = run_and_write(&stack, &params, &seeds, &a.out, Some(input))?;
    print_summary(&report, &a.out);
    Ok(())
}

fn cmd_oracle(a: OracleArgs) -> Result<(), Error> {
    if let Some(k) = a.cubes {
        let f = CubeFunction::diagonal_boxes(k)?;
        let tree = adaptive_cube_tree(&f)?;
        let atoms = tree.independent_atom_count();
        let raw = tree.decomposition.nonzero_atom_count();
        for &tau in &a.tau {
            let n = forest_sparsity(&tree.decomposition, tau)?;
            let status = if n.is_finite() { "finite" } else { "infinite" };
            println!("tau={tau} N={n:e}: {status}, nonzero atoms = {atoms} (raw {raw}, bound {})", (2 * f.n + 1) * k + 1);
        }
        return Ok(());
    }
    let domain = SmoothDomain::from_name(a.shape.as_deref().unwrap_or("disc"))?;
    if a.levels > MAX_LEVEL {
        return Err(Error::Config(format!("--levels must be at most {MAX_LEVEL}")));
    }
    let all = dyadic_level_sums_many(&domain, &a.tau, a.levels)?;
    for s in &all {
        let ratio = s.even_ratio().map_or("n/a".to_string(), |r| format!("{r:.4}"));
        println!("tau={} ratio={ratio} verdict={}", s.tau, s.verdict().as_str());
    }
    match crossing_tau(&domain, a.levels, 0.3, 1.9, 1e-4) {
        Ok(c) => println!("crossing tau={c:.4}"),
        Err(e) => println!("crossing tau unavailable: {e}"),
    }
    if let Some(dir) = a.out {
        fs::create_dir_all(&dir).map_err(|e| io_err(&dir, e))?;
        let mut sums = String::from("level");
        for s in &all {
            sums.push_str(&format!(",tau_{}", s.tau));
        }
        sums.push('\n');
        for k in 0..=a.levels {
            sums.push_str(&k.to_string());
            for s in &all {
                sums.push_str(&format!(",{:e}", s.sums[k]));
            }
            sums.push('\n');
        }
        let p = dir.join("level_sums.csv");
        fs::write(&p, sums).map_err(|e| io_err(&p, e))?;
        let mut counts = String::from("level,boundary_cells,per_2_pow_half_level\n");
        if let Some(s) = all.first() {
            for (k, c) in s.boundary_counts.iter().enumerate() {
                counts.push_str(&format!("{k},{c},{}\n", *c as f64 / 2f64.powf((k / 2) as f64)));
            }
        }
        let p = dir.join("boundary_counts.csv");
        fs::write(&p, counts).map_err(|e| io_err(&p, e))?;
    }
    Ok(())
}

fn cmd_cluster(a: ClusterArgs) -> Result<(), Error> {
    let (stack, _) = load_input(&a.input, true)?;
    let k = a.k.unwrap_or(stack.n_classes);
    let mut out = Vec::new();
    for layer in &stack.layers {
        let x = normalize(&layer.features).map_err(|e| e.in_layer(&layer.name))?.matrix;
        let r = cluster_and_score(&x, &stack.class_ids, k, a.seed).map_err(|e| e.in_layer(&layer.name))?;
        out.push(json!({ "layer": layer.name, "k": k, "seed": a.seed, "indices": r.indices }));
    }
    println!("{}", serde_json::to_string_pretty(&out).expect("json"));
    Ok(())
}
