//! The `fgembed` command-line interface.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 I/O or parse
//! error, 3 numerical failure.

pub mod config;

use std::ffi::OsString;
use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use fgembed_core::decoder::BoundaryMap;
use fgembed_core::io::{self, Image};
use fgembed_core::metrics::{aggregate, BenchmarkReport};
use fgembed_core::synth::{self, SceneSpec};
use fgembed_core::{
    assemble, cut_hierarchy, evaluate, fg_order, globalize, make_targets, neighbor_of, random_scene, solve,
    spectral_boundaries, transfer_fg, watershed_hierarchy, Error, GridDomain, RankMap, RelationMap,
};

pub use config::PipelineConfig;

/// Environment variable naming a config file.
pub const CONFIG_ENV: &str = "FGEMBED_CONFIG";

#[derive(Debug, Parser)]
#[command(name = "fgembed", version, about = "Angular Embedding for segmentation and figure/ground ordering")]
pub struct Cli {
    #[command(flatten)]
    pub overrides: Overrides,

    /// Print the effective configuration as JSON and exit.
    #[arg(long, global = true)]
    pub print_config: bool,

    #[command(subcommand)]
    pub command: Command,
}

/// Config file plus per-key overrides; flags win over the file.
#[derive(Debug, Default, Args)]
pub struct Overrides {
    /// Flat JSON config file.
    #[arg(long, global = true, env = CONFIG_ENV)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub sigma_b: Option<f64>,
    #[arg(long, global = true)]
    pub sigma_fg: Option<f64>,
    #[arg(long, global = true)]
    pub phi: Option<f64>,
    #[arg(long, global = true)]
    pub wedge_rescale: Option<bool>,
    #[arg(long, global = true)]
    pub m: Option<usize>,
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    #[arg(long, global = true)]
    pub max_iter: Option<usize>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub globalize_m: Option<usize>,
    #[arg(long, global = true)]
    pub lambda_floor: Option<f64>,
    #[arg(long, global = true)]
    pub cut_level: Option<f64>,
    /// Comma-separated stencil radii.
    #[arg(long, global = true, value_delimiter = ',')]
    pub radii: Option<Vec<u32>>,
    #[arg(long, global = true)]
    pub sigma_color: Option<f64>,
}

impl Overrides {
    pub fn resolve(&self) -> Result<PipelineConfig, CliError> {
        let mut cfg = match &self.config {
            Some(path) => PipelineConfig::load(path).map_err(|e| match e {
                Error::Config(msg) => CliError::Parse(msg),
                other => other.into(),
            })?,
            None => PipelineConfig::default(),
        };
        macro_rules! apply {
            ($($field:ident),*) => {$(
                if let Some(v) = &self.$field {
                    cfg.$field = v.clone();
                }
            )*};
        }
        apply!(sigma_b, sigma_fg, phi, wedge_rescale, m, tol, max_iter, seed, globalize_m, lambda_floor, cut_level, radii, sigma_color);
        cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        Ok(cfg)
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Baseline relation map from an image (P5/P6) to AFF1.
    Predict {
        image: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Assemble the affinity from AFF1, solve, and write EIG1.
    Embed {
        relations: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Decode EIG1 into rank maps, segments and a boundary image.
    Decode {
        eigenvectors: PathBuf,
        /// Output directory.
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Globalize ownership labels (SEG1 + OWN1) into an RNK1 rank map.
    Globalize {
        #[arg(long)]
        seg: PathBuf,
        #[arg(long)]
        own: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Region-ordering benchmark over one or more PRED GT SEG triples.
    Bench {
        #[arg(required = true, num_args = 3.., value_names = ["PRED", "GT", "SEG"])]
        files: Vec<PathBuf>,
        /// Also write the report as JSON.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Render a synthetic layered scene and its ground truth.
    Synth {
        /// Output directory.
        #[arg(short, long)]
        out: PathBuf,
        /// Scene description (JSON); overrides the random-scene options.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long, default_value_t = 64)]
        height: usize,
        #[arg(long, default_value_t = 64)]
        width: usize,
        #[arg(long, default_value_t = 3)]
        shapes: usize,
        #[arg(long, default_value_t = 0)]
        scene_seed: u64,
    },
}

#[derive(Debug)]
pub enum CliError {
    /// Standard output was closed by the reader; not reported.
    Closed,
    Usage(String),
    Parse(String),
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Closed => 0,
            CliError::Usage(_) => 1,
            CliError::Parse(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Closed => write!(f, "output closed"),
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Parse(m) => write!(f, "input error: {m}"),
            CliError::Numerical(m) => write!(f, "numerical failure: {m}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let msg = e.to_string();
        match e {
            Error::Config(_) | Error::InvalidStencil(_) => CliError::Usage(msg),
            Error::EmptyAffinity
            | Error::ZeroDegree { .. }
            | Error::NotConverged { .. }
            | Error::TooFewEigenvectors { .. }
            | Error::TooLargeForDense { .. }
            | Error::NotHermitian { .. } => CliError::Numerical(msg),
            _ => CliError::Parse(msg),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        if e.kind() == std::io::ErrorKind::BrokenPipe {
            return CliError::Closed;
        }
        CliError::Parse(e.to_string())
    }
}

type CmdResult = Result<(), CliError>;

/// Prefixes input errors with the offending path.
fn at<T>(path: &Path, r: Result<T, Error>) -> Result<T, CliError> {
    r.map_err(|e| match CliError::from(e) {
        CliError::Parse(msg) => CliError::Parse(format!("{}: {msg}", path.display())),
        other => other,
    })
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 { write!(stdout, "{text}") } else { write!(stderr, "{text}") };
            return code;
        }
    };
    match execute(&cli, stdout) {
        Ok(()) | Err(CliError::Closed) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "fgembed: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(cli: &Cli, stdout: &mut dyn Write) -> CmdResult {
    let cfg = cli.overrides.resolve()?;
    if cli.print_config {
        let text = serde_json::to_string_pretty(&cfg).expect("config serializes");
        writeln!(stdout, "{text}")?;
        return Ok(());
    }
    match &cli.command {
        Command::Predict { image, out } => cmd_predict(image, out, &cfg),
        Command::Embed { relations, out } => cmd_embed(relations, out, &cfg, stdout),
        Command::Decode { eigenvectors, out } => cmd_decode(eigenvectors, out, &cfg, stdout),
        Command::Globalize { seg, own, out } => cmd_globalize(seg, own, out, &cfg),
        Command::Bench { files, json } => cmd_bench(files, json.as_deref(), stdout),
        Command::Synth { out, spec, height, width, shapes, scene_seed } => {
            let spec = match spec {
                Some(path) => {
                    let text = std::fs::read_to_string(path).map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))?;
                    serde_json::from_str(&text).map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))?
                }
                None => {
                    let domain = GridDomain::new(*height, *width).map_err(|e| CliError::Usage(e.to_string()))?;
                    random_scene(domain, *shapes, *scene_seed)
                }
            };
            cmd_synth(&spec, out, &cfg)
        }
    }
}

/// Baseline relations: `b = 1 - exp(-‖Δcolor‖ / σ_color)`, `f = 0.5`.
pub fn baseline_relations(image: &Image, cfg: &PipelineConfig) -> Result<RelationMap, Error> {
    let stencil = cfg.stencil()?;
    let domain = image.domain;
    let n = domain.len();
    let mut b = vec![0.0f32; n * stencil.len()];
    for (k, &o) in stencil.offsets().iter().enumerate() {
        for p in 0..n {
            if let Some(q) = neighbor_of(domain, p, o) {
                let dist = image
                    .pixel(p)
                    .iter()
                    .zip(image.pixel(q))
                    .map(|(x, y)| (x - y) * (x - y))
                    .sum::<f64>()
                    .sqrt();
                b[k * n + p] = (1.0 - (-dist / cfg.sigma_color).exp()) as f32;
            }
        }
    }
    let f = vec![0.5f32; b.len()];
    RelationMap::new(domain, stencil, b, f)
}

pub fn cmd_predict(image: &Path, out: &Path, cfg: &PipelineConfig) -> CmdResult {
    let img = at(image, io::load_image(image))?;
    let rel = baseline_relations(&img, cfg)?;
    io::write_aff1(out, &rel)?;
    Ok(())
}

pub fn cmd_embed(relations: &Path, out: &Path, cfg: &PipelineConfig, stdout: &mut dyn Write) -> CmdResult {
    let rel = at(relations, io::read_aff1(relations))?;
    let (w, d) = assemble(&rel, &cfg.affinity())?;
    let emb = solve(&w, &d, &cfg.solver()).map_err(|e| match e {
        Error::NotConverged { applications, residuals } => CliError::Numerical(format!(
            "no convergence after {applications} operator applications; best residuals {}",
            residuals.iter().map(|r| format!("{r:.3e}")).collect::<Vec<_>>().join(" ")
        )),
        other => other.into(),
    })?;
    io::write_eig1(out, rel.domain(), &emb)?;
    writeln!(stdout, "{:>3}  {:>14}  {:>10}", "k", "lambda", "residual")?;
    for (k, (lambda, r)) in emb.eigenvalues.iter().zip(&emb.residuals).enumerate() {
        writeln!(stdout, "{k:>3}  {lambda:>14.6e}  {r:>10.3e}")?;
    }
    Ok(())
}

/// Writes `rank.rnk1` first; `segments.seg1`, `region_rank.rnk1` and
/// `boundary.pgm` need at least two eigenvectors.
pub fn cmd_decode(eigenvectors: &Path, out: &Path, cfg: &PipelineConfig, stdout: &mut dyn Write) -> CmdResult {
    let (domain, emb) = at(eigenvectors, io::read_eig1(eigenvectors))?;
    std::fs::create_dir_all(out)?;
    let rank = fg_order(domain, &emb)?;
    io::write_rnk1(out.join("rank.rnk1"), &rank)?;
    let boundary = spectral_boundaries(domain, &emb, cfg.lambda_floor)?.normalized();
    let hierarchy = watershed_hierarchy(&boundary)?;
    let seg = cut_hierarchy(&hierarchy, cfg.cut_level);
    let region_rank = transfer_fg(&rank, &seg)?;
    let painted = RankMap::new(domain, seg.labels().iter().map(|&l| region_rank[l as usize]).collect())?;
    io::write_seg1(out.join("segments.seg1"), &seg)?;
    io::write_rnk1(out.join("region_rank.rnk1"), &painted)?;
    io::write_image(out.join("boundary.pgm"), &boundary_image(&boundary))?;
    writeln!(stdout, "regions {} (of {} watershed basins)", seg.region_count(), hierarchy.base.region_count())?;
    for (r, v) in region_rank.iter().enumerate() {
        writeln!(stdout, "region {r:>4}  rank {v:>12.6e}")?;
    }
    Ok(())
}

fn boundary_image(b: &BoundaryMap) -> Image {
    Image::gray(b.domain, b.strength.clone())
}

pub fn cmd_globalize(seg: &Path, own: &Path, out: &Path, cfg: &PipelineConfig) -> CmdResult {
    let seg = at(seg, io::read_seg1(seg))?;
    let own = at(own, io::read_own1(own))?;
    let rank = globalize(&seg, &own, &cfg.affinity(), &cfg.globalize_solver())?;
    io::write_rnk1(out, &rank)?;
    Ok(())
}

pub fn cmd_bench(files: &[PathBuf], json: Option<&Path>, stdout: &mut dyn Write) -> CmdResult {
    if !files.len().is_multiple_of(3) {
        return Err(CliError::Usage(format!("expected PRED GT SEG triples, got {} paths", files.len())));
    }
    let mut reports: Vec<BenchmarkReport> = Vec::new();
    for triple in files.chunks(3) {
        let pred = at(&triple[0], io::read_rnk1(&triple[0]))?;
        let gt = at(&triple[1], io::read_rnk1(&triple[1]))?;
        let seg = at(&triple[2], io::read_seg1(&triple[2]))?;
        let report = evaluate(&pred, &gt, &seg)?;
        writeln!(stdout, "# {}", triple[0].display())?;
        write!(stdout, "{report}")?;
        reports.push(report);
    }
    let agg = aggregate(&reports);
    if reports.len() > 1 {
        writeln!(stdout, "# pooled over {} images", agg.images)?;
        write!(stdout, "{}", agg.pooled)?;
        writeln!(stdout, "# mean of per-image accuracies")?;
        for ((name, _), mean) in agg.pooled.scores().iter().zip(agg.per_image_mean) {
            match mean {
                Some(v) => writeln!(stdout, "{name:<9} {v:.4}")?,
                None => writeln!(stdout, "{name:<9} undefined")?,
            }
        }
    }
    if let Some(path) = json {
        let doc = serde_json::json!({ "images": reports, "aggregate": agg });
        std::fs::write(path, serde_json::to_string_pretty(&doc).expect("report serializes") + "\n")?;
    }
    Ok(())
}

/// Writes `spec.json`, `image.pgm`, `segments.seg1`, `rank.rnk1` (true
/// depth), `ownership.own1` and `targets.aff1` (ground-truth relations over
/// the configured stencil).
pub fn cmd_synth(spec: &SceneSpec, out: &Path, cfg: &PipelineConfig) -> CmdResult {
    let scene = synth::render(spec)?;
    std::fs::create_dir_all(out)?;
    let text = serde_json::to_string_pretty(spec).expect("spec serializes");
    std::fs::write(out.join("spec.json"), text + "\n")?;
    io::write_image(out.join("image.pgm"), &synth::render_image(spec, &scene))?;
    io::write_seg1(out.join("segments.seg1"), &scene.segmentation)?;
    io::write_rnk1(out.join("rank.rnk1"), &scene.rank)?;
    io::write_own1(out.join("ownership.own1"), &scene.ownership)?;
    let targets = make_targets(&scene.segmentation, &scene.rank, &cfg.stencil()?)?;
    io::write_aff1(out.join("targets.aff1"), &targets.to_relation_map()?)?;
    Ok(())
}
