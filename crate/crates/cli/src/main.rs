use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use grassmann_hull::io::{self, format_f64};
use grassmann_hull::{
    distance_matrix, embed, extract_endmembers_with_origins, extract_patches, load_cube,
    sample_classes, simplex_dataset, stratify, ChsaParams, Error, ErrorClass, MdsDim, Origin,
    StratificationResult,
};
use serde::{Deserialize, Serialize};
use serde_json::Value;

const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Parser)]
#[command(name = "grassmann-hull", version, about = "Endmember extraction on the Grassmannian")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    #[command(flatten)]
    Run(RunConfig),
    /// Re-run the command recorded in an artifact's `config` field.
    Replay {
        #[arg(long)]
        config: PathBuf,
    },
}

/// Every artifact records the `RunConfig` that produced it.
#[derive(Subcommand, Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
enum RunConfig {
    /// Random generators in Gr(k, n) followed by flag-mean combinations of them.
    SimplexGen(SimplexGen),
    /// Span the spectra of image patches.
    Patches(Patches),
    /// Span random pixel draws from each labelled class.
    ClassSample(ClassSample),
    /// Pairwise chordal distances.
    Distances(Distances),
    /// Classical MDS of a distance matrix.
    Embed(Embed),
    /// Stratify the points of an embedding.
    Chsa(Chsa),
    /// Distances, embedding and stratification in one run.
    Extract(Extract),
    /// Plot table from an extraction report.
    PlotData(PlotData),
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
struct SimplexGen {
    #[arg(long, default_value_t = 3)]
    generators: usize,
    #[arg(long, default_value_t = 10)]
    ambient: usize,
    #[arg(long, default_value_t = 3)]
    dim: usize,
    /// Total number of points, generators included.
    #[arg(long, default_value_t = 5000)]
    count: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
struct Patches {
    /// JSON cube header.
    #[arg(long)]
    cube: PathBuf,
    #[arg(long, default_value_t = 3)]
    patch_size: usize,
    /// Defaults to the patch size.
    #[arg(long)]
    stride: Option<usize>,
    #[arg(long, default_value_t = 1e-8)]
    rank_tolerance: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
struct ClassSample {
    #[arg(long)]
    cube: PathBuf,
    /// CSV of per-pixel labels, 0 = unlabelled.
    #[arg(long)]
    class_map: PathBuf,
    #[arg(long, default_value_t = 9)]
    draw_size: usize,
    #[arg(long, default_value_t = 10)]
    draws: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
struct Distances {
    /// Subspace set.
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
struct Embed {
    /// Distance matrix.
    #[arg(long)]
    input: PathBuf,
    /// `auto` or a positive integer.
    #[arg(long, default_value = "auto")]
    mds_dim: MdsDim,
    /// Coordinates CSV; eigenvalues go to `<out>.meta.json`.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug, Clone, Copy, Serialize, Deserialize)]
struct ChsaArgs {
    #[arg(long, default_value_t = 7)]
    neighbors: usize,
    #[arg(long, default_value_t = 1e-10)]
    gamma: f64,
    #[arg(long, default_value_t = 1e-5)]
    lambda: f64,
    #[arg(long, default_value_t = 1e-9)]
    solver_tolerance: f64,
    #[arg(long, default_value_t = 1e-7)]
    negativity_threshold: f64,
}

impl From<ChsaArgs> for ChsaParams {
    fn from(a: ChsaArgs) -> Self {
        ChsaParams {
            neighbors: a.neighbors,
            gamma: a.gamma,
            lambda: a.lambda,
            solver_tolerance: a.solver_tolerance,
            negativity_threshold: a.negativity_threshold,
        }
    }
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
struct Chsa {
    /// Embedding coordinates CSV.
    #[arg(long)]
    input: PathBuf,
    #[command(flatten)]
    #[serde(flatten)]
    params: ChsaArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
struct Extract {
    /// Subspace set.
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value = "auto")]
    mds_dim: MdsDim,
    #[command(flatten)]
    #[serde(flatten)]
    params: ChsaArgs,
    /// Report JSON.
    #[arg(long)]
    out: PathBuf,
    /// Also write the bare stratification JSON here.
    #[arg(long)]
    stratification_out: Option<PathBuf>,
    /// Also write the embedding CSV (and sidecar) here.
    #[arg(long)]
    embedding_out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
struct PlotData {
    /// Extraction report.
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

/// Sidecar written next to artifacts that cannot carry their own config.
#[derive(Serialize, Deserialize)]
struct Meta {
    version: String,
    config: RunConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    origins: Option<Vec<Origin>>,
    #[serde(default, skip_serializing_if = "Value::is_null")]
    details: Value,
}

fn meta_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".meta.json");
    PathBuf::from(s)
}

fn write_meta(
    out: &Path,
    config: &RunConfig,
    origins: Option<Vec<Origin>>,
    details: Value,
) -> Result<(), Error> {
    let meta = Meta { version: VERSION.into(), config: config.clone(), origins, details };
    io::write_json(meta_path(out), &meta)
}

/// Origins recorded by whatever produced `input`, if they fit.
fn input_origins(input: &Path, len: usize) -> (Vec<Origin>, Option<RunConfig>) {
    let path = meta_path(input);
    if path.exists() {
        if let Ok(meta) = io::read_json::<Meta>(&path) {
            if let Some(o) = meta.origins.filter(|o| o.len() == len) {
                return (o, Some(meta.config));
            }
            return ((0..len).map(|index| Origin::Index { index }).collect(), Some(meta.config));
        }
    }
    ((0..len).map(|index| Origin::Index { index }).collect(), None)
}

#[derive(Serialize, Deserialize)]
struct EmbeddingSummary {
    q: usize,
    requested: MdsDim,
    dim_reduced: bool,
    negative_mass: f64,
    eigenvalues: Vec<f64>,
    /// First three coordinates of every point, zero padded.
    plot_coordinates: Vec<[f64; 3]>,
}

#[derive(Serialize, Deserialize)]
struct Report {
    version: String,
    config: RunConfig,
    /// Config of the run that produced the input set, when known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    input_config: Option<RunConfig>,
    embedding: EmbeddingSummary,
    stratification: StratificationResult,
    origins: Vec<Origin>,
    vertex_origins: Vec<Origin>,
}

fn origin_label(o: &Origin) -> String {
    match *o {
        Origin::Pixel { row, col } => format!("pixel:{row}:{col}"),
        Origin::Generator { index } => format!("generator:{index}"),
        Origin::Sample { index } => format!("sample:{index}"),
        Origin::Class { label, draw } => format!("class:{label}:{draw}"),
        Origin::Index { index } => format!("index:{index}"),
    }
}

fn run(config: &RunConfig) -> Result<(), Error> {
    match config {
        RunConfig::SimplexGen(c) => {
            let (points, origins) =
                simplex_dataset(c.generators, c.ambient, c.dim, c.count, c.seed)?;
            io::write_subspaces(&c.out, &points)?;
            write_meta(&c.out, config, Some(origins), Value::Null)
        }
        RunConfig::Patches(c) => {
            let cube = load_cube(&c.cube)?;
            let stride = c.stride.unwrap_or(c.patch_size);
            let set = extract_patches(&cube, c.patch_size, stride, c.rank_tolerance)?;
            io::write_subspaces(&c.out, &set.points)?;
            let details = serde_json::json!({
                "grid_len": set.grid_len(),
                "excluded": set.excluded,
                "uncovered_rows": set.uncovered_rows,
                "uncovered_cols": set.uncovered_cols,
                "band_mask": cube.band_mask(),
            });
            write_meta(&c.out, config, Some(set.point_origins()), details)
        }
        RunConfig::ClassSample(c) => {
            let cube = load_cube(&c.cube)?;
            let map = io::read_class_map(&c.class_map)?;
            let set = sample_classes(&cube, &map, c.draw_size, c.draws, c.seed)?;
            io::write_subspaces(&c.out, &set.points)?;
            let details = serde_json::json!({ "excluded": set.excluded });
            write_meta(&c.out, config, Some(set.point_origins()), details)
        }
        RunConfig::Distances(c) => {
            let points = io::read_subspaces(&c.input)?;
            let d = distance_matrix(&points)?;
            io::write_distance_matrix(&c.out, &d)?;
            write_meta(&c.out, config, None, Value::Null)
        }
        RunConfig::Embed(c) => {
            let d = io::read_distance_matrix(&c.input)?;
            let e = embed(&d, c.mds_dim)?;
            io::write_embedding(&c.out, meta_path(&c.out), &e, Some(to_value(config)))
        }
        RunConfig::Chsa(c) => {
            let coords = io::read_matrix_csv(&c.input)?;
            let result = stratify(coords.as_ref(), &c.params.into())?;
            io::write_stratification(&c.out, &result)?;
            write_meta(&c.out, config, None, Value::Null)
        }
        RunConfig::Extract(c) => {
            let points = io::read_subspaces(&c.input)?;
            let (origins, input_config) = input_origins(&c.input, points.len());
            let report =
                extract_endmembers_with_origins(&points, origins, &c.params.into(), c.mds_dim)?;
            if let Some(path) = &c.stratification_out {
                io::write_stratification(path, &report.stratification)?;
            }
            if let Some(path) = &c.embedding_out {
                io::write_embedding(
                    path,
                    meta_path(path),
                    &report.embedding,
                    Some(to_value(config)),
                )?;
            }
            let e = &report.embedding;
            let x = e.coordinates();
            let plot_coordinates = (0..x.nrows())
                .map(|i| std::array::from_fn(|j| if j < x.ncols() { x[(i, j)] } else { 0.0 }))
                .collect();
            let doc = Report {
                version: VERSION.into(),
                config: config.clone(),
                input_config,
                embedding: EmbeddingSummary {
                    q: e.dim(),
                    requested: e.requested(),
                    dim_reduced: e.dim_reduced(),
                    negative_mass: e.negative_mass(),
                    eigenvalues: e.eigenvalues().to_vec(),
                    plot_coordinates,
                },
                stratification: report.stratification,
                origins: report.origins,
                vertex_origins: report.vertex_origins,
            };
            io::write_json(&c.out, &doc)
        }
        RunConfig::PlotData(c) => {
            let report: Report = io::read_json(&c.input)?;
            let s = &report.stratification;
            let p = s.records.len();
            if report.embedding.plot_coordinates.len() != p || report.origins.len() != p {
                return Err(Error::SizeMismatch {
                    expected: p,
                    found: report.embedding.plot_coordinates.len(),
                });
            }
            let mut text = String::from("index,x,y,z,weight_norm,flagged,origin\n");
            for (i, (rec, xyz)) in
                s.records.iter().zip(&report.embedding.plot_coordinates).enumerate()
            {
                text.push_str(&format!(
                    "{i},{},{},{},{},{},{}\n",
                    format_f64(xyz[0]),
                    format_f64(xyz[1]),
                    format_f64(xyz[2]),
                    format_f64(rec.weight_norm),
                    u8::from(rec.is_flagged),
                    origin_label(&report.origins[i]),
                ));
            }
            std::fs::write(&c.out, text)
                .map_err(|e| Error::Io { path: c.out.clone(), source: e })?;
            write_meta(&c.out, config, None, Value::Null)
        }
    }
}

fn to_value(config: &RunConfig) -> Value {
    serde_json::to_value(config).expect("config serializes")
}

fn load_config(path: &Path) -> Result<RunConfig, Error> {
    let doc: Value = io::read_json(path)?;
    let config = doc.get("config").cloned().unwrap_or(doc);
    serde_json::from_value(config).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        message: format!("no usable config: {e}"),
    })
}

fn fail(kind: &str, message: &str, code: u8) -> ExitCode {
    eprintln!("{}", serde_json::json!({ "error": kind, "message": message }));
    ExitCode::from(code)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let message = e.to_string();
            let first = message.lines().next().unwrap_or("").trim_start_matches("error: ");
            return fail("Usage", first, 1);
        }
    };
    if let Some(n) = cli.threads {
        if n == 0 {
            return fail("InvalidParameter", "--threads must be positive", 1);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            return fail("InvalidParameter", &e.to_string(), 1);
        }
    }
    let result = match &cli.command {
        Command::Run(config) => run(config),
        Command::Replay { config } => load_config(config).and_then(|c| run(&c)),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let code = match e.class() {
                ErrorClass::Input => 1,
                ErrorClass::Numerical => 2,
            };
            fail(e.kind(), &e.to_string(), code)
        }
    }
}
