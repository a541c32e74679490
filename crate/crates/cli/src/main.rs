use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{info, warn};

use urbanca::calibration::{classification_precision, fit_logistic, max_density, prepare_parcels, FitOptions};
use urbanca::engine::{simulate, Disturbance};
use urbanca::io::{
    self, coefficients_to_json, export_result, load_cities, load_custom_rates, load_exclusions, load_export, load_parcels,
    load_samples, write_text, DensityModel, LoadOptions, RunConfig, RunManifest, SynthSpec,
};
use urbanca::metrics::{confusion_matrix, overlap_precision, rasterize, summarize, Grid, GroupBy};
use urbanca::neighbors::{compute_neighbors, load_graph, save_graph, DistanceMode};
use urbanca::scenario::{ScenarioKind, ScenarioSpec};
use urbanca::{ErrorKind, ExpansionSet, ParcelSet, SimulationResult};

const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_STALE: u8 = 3;
const EXIT_SHORTFALL: u8 = 4;

/// Parcel-level urban expansion simulation.
#[derive(Debug, Parser)]
#[command(name = "urbanca", version)]
struct Cli {
    /// Run configuration (JSON). Defaults apply to missing keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Random seed; overrides the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for neighbor building and simulation.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[arg(long, global = true, default_value = "info")]
    log_level: log::LevelFilter,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Validate and reproject input files, optionally writing a cleaned parcel file.
    Ingest(IngestArgs),
    /// Build the parcel neighbor graph and save it as a cache file.
    Neighbors(NeighborsArgs),
    /// Fit logistic coefficients from a samples table.
    Calibrate(CalibrateArgs),
    /// Run a scenario and export the result map, summary and manifest.
    Simulate(SimulateArgs),
    /// Compare two exported result maps.
    Compare(CompareArgs),
    /// Summarize a saved simulation result.
    Report(ReportArgs),
    /// Generate a synthetic country for testing.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
struct IngestArgs {
    #[arg(long)]
    parcels: PathBuf,
    #[arg(long)]
    cities: Option<PathBuf>,
    #[arg(long)]
    exclusions: Option<PathBuf>,
    /// Drop features with invalid geometry instead of failing.
    #[arg(long)]
    skip_invalid: bool,
    /// Cleaned parcel file, in the input coordinate system.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct NeighborsArgs {
    #[arg(long)]
    parcels: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Neighborhood radius in meters; overrides the configuration.
    #[arg(long)]
    radius: Option<f64>,
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModeArg {
    Boundary,
    Centroid,
}

#[derive(Debug, Args)]
struct CalibrateArgs {
    #[arg(long)]
    samples: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// L2 penalty on the slopes.
    #[arg(long, default_value_t = 0.0)]
    ridge: f64,
    /// Cut-off for the reported classification precision.
    #[arg(long, default_value_t = 0.5)]
    cutoff: f64,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[arg(long)]
    parcels: PathBuf,
    #[arg(long)]
    cities: PathBuf,
    #[arg(long)]
    exclusions: Option<PathBuf>,
    /// Neighbor cache from `urbanca neighbors`; computed on the fly if absent.
    #[arg(long)]
    graph: Option<PathBuf>,
    /// Result map (GeoJSON). Summary, result and manifest files go next to it.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum)]
    scenario: Option<ScenarioArg>,
    #[arg(long)]
    horizon: Option<u32>,
    #[arg(long)]
    no_disturbance: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ScenarioArg {
    Bau,
    Uao,
    Ntu,
    Custom,
}

impl From<ScenarioArg> for ScenarioKind {
    fn from(s: ScenarioArg) -> Self {
        match s {
            ScenarioArg::Bau => ScenarioKind::Bau,
            ScenarioArg::Uao => ScenarioKind::Uao,
            ScenarioArg::Ntu => ScenarioKind::Ntu,
            ScenarioArg::Custom => ScenarioKind::Custom,
        }
    }
}

#[derive(Debug, Args)]
struct CompareArgs {
    /// Parcel file both maps refer to; supplies the areas.
    #[arg(long)]
    parcels: PathBuf,
    #[arg(long)]
    simulated: PathBuf,
    /// Reference map; parcels with a conversion year count as expanded.
    #[arg(long)]
    observed: PathBuf,
    /// Also compare on a square grid with this cell size in meters.
    #[arg(long)]
    cell_m: Option<f64>,
}

#[derive(Debug, Args)]
struct ReportArgs {
    /// `<out>.result.json` written by `simulate`.
    #[arg(long)]
    result: PathBuf,
    #[arg(long)]
    cities: PathBuf,
    #[arg(long, value_enum, default_value = "ua")]
    group_by: GroupArg,
    /// Write CSV here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum GroupArg {
    Ua,
    Admin,
    None,
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long, default_value_t = 4)]
    cities: usize,
    #[arg(long, default_value_t = 400)]
    parcels_per_city: usize,
    #[arg(long, default_value_t = 200.0)]
    parcel_size_m: f64,
    #[arg(long, default_value_t = 0.2)]
    urban_fraction: f64,
    #[arg(long)]
    uniform_density: bool,
    #[arg(long)]
    exclusion_band: bool,
    #[arg(long, default_value_t = 0.2)]
    jitter: f64,
    /// Number of planted calibration samples to write.
    #[arg(long, default_value_t = 5000)]
    samples: usize,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_USAGE) } else { ExitCode::SUCCESS };
        }
    };
    env_logger::Builder::new().filter_level(cli.log_level).format_timestamp(None).init();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &anyhow::Error) -> u8 {
    match e.chain().find_map(|c| c.downcast_ref::<urbanca::Error>()).map(urbanca::Error::kind) {
        Some(ErrorKind::Usage) => EXIT_USAGE,
        Some(ErrorKind::StaleCache) => EXIT_STALE,
        _ => EXIT_DATA,
    }
}

fn run(cli: Cli) -> anyhow::Result<u8> {
    if let Some(j) = cli.jobs {
        if j == 0 {
            return Err(urbanca::Error::Config("--jobs must be at least 1".into()).into());
        }
        rayon::ThreadPoolBuilder::new().num_threads(j).build_global()?;
    }
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    match cli.command {
        Command::Ingest(a) => ingest(&cfg, a),
        Command::Neighbors(a) => neighbors(cfg, a),
        Command::Calibrate(a) => calibrate(&cfg, a),
        Command::Simulate(a) => simulate_cmd(cfg, a),
        Command::Compare(a) => compare(&cfg, a),
        Command::Report(a) => report(a),
        Command::Synth(a) => synth(&cfg, a),
    }
}

fn print_json(v: &serde_json::Value) -> anyhow::Result<()> {
    let mut s = serde_json::to_string_pretty(v)?;
    s.push('\n');
    write_stdout(&s)
}

/// A closed pipe (`urbanca ... | head`) is not an error.
fn write_stdout(s: &str) -> anyhow::Result<()> {
    let mut out = std::io::stdout().lock();
    match out.write_all(s.as_bytes()).and_then(|_| out.flush()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

fn ingest(cfg: &RunConfig, a: IngestArgs) -> anyhow::Result<u8> {
    let opts = LoadOptions { skip_invalid: a.skip_invalid };
    let (parcels, report) = load_parcels(&a.parcels, &cfg.projection, opts)?;
    for label in &report.repaired {
        info!("repaired {label}");
    }
    for (label, why) in &report.rejected {
        warn!("rejected {label}: {why}");
    }
    let mut out = serde_json::json!({ "parcels": report });
    if let Some(p) = &a.cities {
        let cities = load_cities(p, &cfg.projection)?;
        out["cities"] = cities.len().into();
    }
    if let Some(p) = &a.exclusions {
        let ex = load_exclusions(p, &cfg.projection)?;
        out["exclusions"] = ex.len().into();
    }
    if let Some(dest) = &a.out {
        write_text(dest, &io::parcels_to_geojson(&parcels, &cfg.projection))?;
        let mut m = RunManifest::new("ingest", cfg);
        m.add_input("parcels", &a.parcels)?;
        m.add_output("parcels", dest)?;
        m.write_for(dest)?;
    }
    print_json(&out)?;
    Ok(0)
}

fn neighbors(mut cfg: RunConfig, a: NeighborsArgs) -> anyhow::Result<u8> {
    if let Some(r) = a.radius {
        cfg.radius_m = r;
    }
    if let Some(m) = a.mode {
        cfg.distance_mode = match m {
            ModeArg::Boundary => DistanceMode::Boundary,
            ModeArg::Centroid => DistanceMode::Centroid,
        };
    }
    cfg.validate()?;
    let (parcels, _) = load_parcels(&a.parcels, &cfg.projection, LoadOptions::default())?;
    let start = std::time::Instant::now();
    let g = compute_neighbors(&parcels, cfg.radius_m, cfg.distance_mode)?;
    info!("{} parcels, {} undirected edges in {:.2?}", g.parcel_count(), g.edge_count(), start.elapsed());
    save_graph(&g, &a.out)?;
    let mut m = RunManifest::new("neighbors", &cfg);
    m.add_input("parcels", &a.parcels)?;
    m.add_output("graph", &a.out)?;
    m.write_for(&a.out)?;
    Ok(0)
}

fn calibrate(cfg: &RunConfig, a: CalibrateArgs) -> anyhow::Result<u8> {
    let samples = load_samples(&a.samples)?;
    let opts = FitOptions { ridge: a.ridge, ..FitOptions::default() };
    let fit = fit_logistic(&samples, &opts)?;
    if !fit.converged {
        warn!("fit did not converge after {} iterations; writing best iterate", fit.iterations);
    }
    let w = fit.coefficients();
    write_text(&a.out, &coefficients_to_json(&w))?;
    let precision = classification_precision(&w, &samples, a.cutoff)?;
    let mut m = RunManifest::new("calibrate", cfg);
    m.add_input("samples", &a.samples)?;
    m.add_output("coefficients", &a.out)?;
    m.write_for(&a.out)?;
    print_json(&serde_json::json!({
        "samples": samples.len(),
        "converged": fit.converged,
        "iterations": fit.iterations,
        "log_likelihood": fit.log_likelihood,
        "gradient_norm": fit.gradient_norm,
        "precision": precision,
        "coefficients": w,
    }))?;
    Ok(0)
}

fn result_path(out: &Path) -> PathBuf {
    out.with_extension("result.json")
}

fn simulate_cmd(mut cfg: RunConfig, a: SimulateArgs) -> anyhow::Result<u8> {
    if let Some(s) = a.scenario {
        cfg.scenario = s.into();
    }
    if let Some(h) = a.horizon {
        cfg.horizon_years = h;
    }
    if a.no_disturbance {
        cfg.disturbance = Disturbance::Off;
    }
    cfg.validate()?;
    let proj = &cfg.projection;
    let (mut parcels, _) = load_parcels(&a.parcels, proj, LoadOptions::default())?;
    let cities = load_cities(&a.cities, proj)?;
    let exclusions = match &a.exclusions {
        Some(p) => load_exclusions(p, proj)?,
        None => urbanca::ExclusionSet::new(Vec::new()),
    };
    let coefficients = cfg.coefficients()?;
    let mut scenario = ScenarioSpec::new(cfg.scenario).with_horizon(cfg.horizon_years);
    if let Some(p) = &cfg.custom_rates_path {
        scenario.custom_rates = load_custom_rates(p)?;
    }
    scenario.validate()?;

    let graph = match &a.graph {
        Some(p) => load_graph(p, &parcels)?,
        None => compute_neighbors(&parcels, cfg.radius_m, cfg.distance_mode)?,
    };
    let max = cfg.max_density.unwrap_or_else(|| max_density(&parcels));
    prepare_parcels(&mut parcels, &cities, &exclusions, max, cfg.exclusion_overlap_threshold)?;
    let params = cfg.ca_params(coefficients);
    let result = simulate(&cities, &parcels, &graph, &scenario, &params)?;

    let summary = export_result(&result, &parcels, &cities, proj, cfg.base_year, &a.out)?;
    let rp = result_path(&a.out);
    write_text(&rp, &(serde_json::to_string_pretty(&result)? + "\n"))?;

    let mut m = RunManifest::new("simulate", &cfg);
    m.add_input("parcels", &a.parcels)?;
    m.add_input("cities", &a.cities)?;
    if let Some(p) = &a.exclusions {
        m.add_input("exclusions", p)?;
    }
    if let Some(p) = &a.graph {
        m.add_input("graph", p)?;
    }
    if let Some(p) = &cfg.coefficients_path {
        m.add_input("coefficients", p)?;
    }
    if let Some(p) = &cfg.custom_rates_path {
        m.add_input("custom_rates", p)?;
    }
    m.add_output("result_map", &a.out)?;
    m.add_output("summary", &summary)?;
    m.add_output("result", &rp)?;
    m.write_for(&a.out)?;

    let converted: usize = result.cities.iter().map(|c| c.years.iter().map(|y| y.converted.len()).sum::<usize>()).sum();
    info!("{} cities, {converted} parcels converted", result.cities.len());
    let shortfalls = result.shortfalls();
    for (city, year, km2) in &shortfalls {
        warn!("city {city} year {year}: target missed by {km2:.4} km²");
    }
    Ok(if shortfalls.is_empty() { 0 } else { EXIT_SHORTFALL })
}

fn expansion(map: &Path, parcels: &ParcelSet) -> anyhow::Result<ExpansionSet> {
    let rows = load_export(map)?;
    let mut items = Vec::new();
    for (id, e) in rows {
        if e.converted_year.is_some() {
            let i = parcels.index_of(id).ok_or_else(|| urbanca::Error::Data {
                location: map.display().to_string(),
                message: format!("parcel {id} is not in the parcel file"),
            })?;
            items.push((id, parcels.as_slice()[i].area_km2()));
        }
    }
    Ok(ExpansionSet::new(items)?)
}

fn compare(cfg: &RunConfig, a: CompareArgs) -> anyhow::Result<u8> {
    let (parcels, _) = load_parcels(&a.parcels, &cfg.projection, LoadOptions::default())?;
    let sim = expansion(&a.simulated, &parcels)?;
    let obs = expansion(&a.observed, &parcels)?;
    let universe = ExpansionSet::universe(&parcels)?;
    let m = confusion_matrix(&sim, &obs, &universe)?;
    let mut out = serde_json::json!({
        "simulated_km2": sim.area(),
        "observed_km2": obs.area(),
        "intersection_km2": sim.intersection_area(&obs),
        "overlap_precision": overlap_precision(&obs, &sim).ok(),
        "confusion": m,
        "confusion_precision": m.overall_precision(),
    });
    if let Some(cell) = a.cell_m {
        let grid = Grid::new(cell)?;
        let rs = rasterize(&parcels, &sim, &grid)?;
        let ro = rasterize(&parcels, &obs, &grid)?;
        out["raster"] = serde_json::json!({
            "cell_m": cell,
            "overlap_precision": overlap_precision(&ro, &rs).ok(),
        });
    }
    print_json(&out)?;
    Ok(0)
}

fn report(a: ReportArgs) -> anyhow::Result<u8> {
    let text = std::fs::read_to_string(&a.result).with_context(|| format!("reading {}", a.result.display()))?;
    let result: SimulationResult = serde_json::from_str(&text)?;
    // Centers are not used for summaries, so the projection is irrelevant here.
    let cities = load_cities(&a.cities, &io::Projection::Identity)?;
    let group = match a.group_by {
        GroupArg::Ua => Some(GroupBy::UrbanAgglomeration),
        GroupArg::Admin => Some(GroupBy::AdminLevel),
        GroupArg::None => None,
    };
    let csv = summarize(&result, &cities, group)?.to_csv();
    match &a.out {
        Some(p) => write_text(p, &csv)?,
        None => write_stdout(&csv)?,
    }
    Ok(0)
}

fn synth(cfg: &RunConfig, a: SynthArgs) -> anyhow::Result<u8> {
    let spec = SynthSpec {
        cities: a.cities,
        parcels_per_city: a.parcels_per_city,
        parcel_size_m: a.parcel_size_m,
        urban_seed_fraction: a.urban_fraction,
        density_model: if a.uniform_density { DensityModel::Uniform } else { DensityModel::Decaying },
        exclusion_band: a.exclusion_band,
        jitter: a.jitter,
        seed: cfg.seed,
    };
    let data = io::generate_synthetic(&spec)?;
    let proj = &cfg.projection;
    let files = [
        ("parcels", "parcels.geojson", io::parcels_to_geojson(&data.parcels, proj)),
        ("cities", "cities.csv", io::cities_to_csv(&data.cities, proj)),
        ("exclusions", "exclusions.geojson", io::exclusions_to_geojson(&data.exclusions, proj)),
        ("samples", "samples.csv", io::samples_to_csv(&io::planted_samples(a.samples, &cfg.coefficients()?, cfg.seed))),
    ];
    let mut m = RunManifest::new("synth", cfg);
    for (role, name, text) in &files {
        let p = a.out_dir.join(name);
        write_text(&p, text)?;
        m.add_output(role, &p)?;
    }
    let mp = m.write_for(&a.out_dir.join("synth"))?;
    info!(
        "{} parcels in {} cities ({:.3} km²); manifest {}",
        data.parcels.len(),
        data.cities.len(),
        data.total_area_km2,
        mp.display()
    );
    Ok(0)
}
