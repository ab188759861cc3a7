use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use noonmzi::analysis::{analyze_sweep, FringeFit, Harmonic, IndexPoint, IndexRegression};
use noonmzi::formats::{read_sweep_csv, write_hom_csv, write_sweep_csv};
use noonmzi::metrology::{exceeds_supersensitivity_threshold, limits, sensitivity_map, supersensitivity_threshold};
use noonmzi::report::{acceptance_table, Row};
use noonmzi::sim::{simulate_hom_scan, simulate_sweep, RunManifest, SampleModel};
use serde::Serialize;
use sha2::{Digest, Sha256};

const SEED_VAR: &str = "NOON_SEED";
const DEFAULT_TABLE_SEED: u64 = 7;

#[derive(Parser)]
#[command(name = "noonmzi", version, about = "Two-photon interferometer simulation and fringe analysis")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a concentration sweep and HOM scan from a JSON manifest.
    Simulate {
        #[arg(long)]
        manifest: PathBuf,
        /// Sweep CSV. The HOM scan and resolved manifest go next to it unless given.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        hom_out: Option<PathBuf>,
        #[arg(long)]
        manifest_out: Option<PathBuf>,
    },
    /// Print the default BSA manifest as a starting point for `simulate`.
    DefaultManifest {
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Fit the fringe of a sweep CSV and regress index change on concentration.
    Fit {
        input: PathBuf,
        /// 2 fits the coincidence fringe, 1 the heralded singles fringe.
        #[arg(long, value_parser = clap::value_parser!(u8).range(1..=2))]
        harmonic: u8,
        /// Manifest supplying wavelength and channel length.
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sensitivity over coupler reflectivities for fixed arm transmissions.
    SenseMap {
        #[arg(long, default_value_t = 1.0)]
        tau1: f64,
        #[arg(long, default_value_t = 1.0)]
        tau2: f64,
        #[arg(long, default_value_t = 51)]
        grid: usize,
        /// CSV matrix, rows R1 and columns R2. Stdout if omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Phase limits for N photons and the supersensitivity test for a visibility.
    Limits {
        #[arg(long = "v")]
        visibility: Option<f64>,
        #[arg(long = "n", default_value_t = 2)]
        photons: u32,
    },
    /// Regenerate the acceptance table.
    MakePaperNumbers {
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_enum, default_value_t = TableFormat::Text)]
        format: TableFormat,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum TableFormat {
    Text,
    Json,
}

#[derive(Debug)]
enum Failure {
    Input(String),
    Io(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Input(_) => 2,
            Failure::Io(_) => 3,
        }
    }
}

impl From<noonmzi::Error> for Failure {
    fn from(e: noonmzi::Error) -> Self {
        match e {
            noonmzi::Error::Io(m) => Failure::Io(m),
            other => Failure::Input(other.to_string()),
        }
    }
}

type Outcome<T> = std::result::Result<T, Failure>;

fn io_error(path: &Path, e: io::Error) -> Failure {
    Failure::Io(format!("{}: {e}", path.display()))
}

fn read_file(path: &Path) -> Outcome<Vec<u8>> {
    fs::read(path).map_err(|e| io_error(path, e))
}

fn write_file(path: &Path, bytes: &[u8]) -> Outcome<()> {
    fs::write(path, bytes).map_err(|e| io_error(path, e))
}

fn emit(out: Option<&Path>, text: &str) -> Outcome<()> {
    match out {
        Some(path) => write_file(path, text.as_bytes()),
        None => io::stdout().write_all(text.as_bytes()).map_err(|e| Failure::Io(format!("stdout: {e}"))),
    }
}

fn seed_override() -> Outcome<Option<u64>> {
    match std::env::var(SEED_VAR) {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| Failure::Input(format!("{SEED_VAR}={v:?} is not an unsigned integer"))),
        Err(std::env::VarError::NotPresent) => Ok(None),
        Err(e) => Err(Failure::Input(format!("{SEED_VAR}: {e}"))),
    }
}

fn load_manifest(path: &Path) -> Outcome<RunManifest> {
    let bytes = read_file(path)?;
    let manifest: RunManifest =
        serde_json::from_slice(&bytes).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
    manifest.validate().map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
    Ok(manifest)
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}{suffix}"))
}

fn simulate(manifest: &Path, out: &Path, hom_out: Option<PathBuf>, manifest_out: Option<PathBuf>) -> Outcome<()> {
    let mut m = load_manifest(manifest)?;
    if let Some(seed) = seed_override()? {
        m.plan.seed = seed;
    }
    let sweep = simulate_sweep(&m.plan, &m.config, &m.sample)?;
    let mut buf = Vec::new();
    write_sweep_csv(&mut buf, &sweep)?;
    write_file(out, &buf)?;
    println!("wrote {} ({} steps)", out.display(), sweep.len());

    if let Some(scan) = &m.hom {
        let points = simulate_hom_scan(&scan.delays, scan.coherence_scale, &m.hom_config(), &m.plan)?;
        let path = hom_out.unwrap_or_else(|| sibling(out, ".hom.csv"));
        let mut buf = Vec::new();
        write_hom_csv(&mut buf, &points)?;
        write_file(&path, &buf)?;
        println!("wrote {} ({} delays)", path.display(), points.len());
    }

    let path = manifest_out.unwrap_or_else(|| sibling(out, ".manifest.json"));
    let json = serde_json::to_string_pretty(&m).map_err(|e| Failure::Input(e.to_string()))?;
    write_file(&path, format!("{json}\n").as_bytes())?;
    println!("wrote {}", path.display());
    Ok(())
}

fn default_manifest(seed: u64) -> Outcome<()> {
    let json =
        serde_json::to_string_pretty(&RunManifest::bsa_default(seed)).map_err(|e| Failure::Input(e.to_string()))?;
    emit(None, &format!("{json}\n"))
}

#[derive(Serialize)]
struct FitReport {
    input: String,
    sha256: String,
    harmonic: Harmonic,
    fit: FringeFit,
    exceeds_supersensitivity_threshold: Option<bool>,
    regression: IndexRegression,
    points: Vec<IndexPoint>,
}

fn fit(input: &Path, harmonic: u8, manifest: Option<&Path>, out: Option<&Path>) -> Outcome<()> {
    let harmonic = Harmonic::try_from(harmonic)?;
    let sample = match manifest {
        Some(path) => load_manifest(path)?.sample,
        None => SampleModel::bsa_785nm(),
    };
    let bytes = read_file(input)?;
    let sweep = read_sweep_csv(bytes.as_slice()).map_err(|e| Failure::Input(format!("{}: {e}", input.display())))?;
    let analysis = analyze_sweep(&sweep, harmonic, sample.wavelength, sample.channel_length)?;
    let report = FitReport {
        input: input.display().to_string(),
        sha256: hex::encode(Sha256::digest(&bytes)),
        harmonic,
        exceeds_supersensitivity_threshold: match harmonic {
            Harmonic::Double => Some(exceeds_supersensitivity_threshold(analysis.fit.visibility)),
            Harmonic::Single => None,
        },
        fit: analysis.fit,
        regression: analysis.regression,
        points: analysis.points,
    };
    let json = serde_json::to_string_pretty(&report).map_err(|e| Failure::Input(e.to_string()))?;
    emit(out, &format!("{json}\n"))
}

fn sense_map(tau1: f64, tau2: f64, grid: usize, out: Option<&Path>) -> Outcome<()> {
    let map = sensitivity_map(tau1, tau2, grid)?;
    let mut csv = String::from("r1\\r2");
    for r in &map.reflectivities {
        csv.push_str(&format!(",{r}"));
    }
    csv.push('\n');
    for (r1, row) in map.reflectivities.iter().zip(&map.values) {
        csv.push_str(&r1.to_string());
        for v in row {
            csv.push_str(&format!(",{v}"));
        }
        csv.push('\n');
    }
    let (r1, r2) = map.argmax_reflectivities();
    match out {
        Some(path) => {
            write_file(path, csv.as_bytes())?;
            println!("argmax (R1, R2) = ({r1:.2}, {r2:.2}), S = {:.6}", map.max());
        }
        None => {
            print!("{csv}");
            eprintln!("argmax (R1, R2) = ({r1:.2}, {r2:.2}), S = {:.6}", map.max());
        }
    }
    Ok(())
}

fn report_limits(visibility: Option<f64>, photons: u32) -> Outcome<()> {
    let l = limits(photons)?;
    println!("N = {photons}");
    println!("SQL delta-phi: {:.4}", l.sql);
    println!("Heisenberg delta-phi: {:.4}", l.heisenberg);
    println!("supersensitivity threshold: {:.4}", supersensitivity_threshold());
    if let Some(v) = visibility {
        if !v.is_finite() {
            return Err(Failure::Input(format!("visibility {v} is not finite")));
        }
        println!("visibility: {v}");
        println!("exceeds supersensitivity threshold: {}", exceeds_supersensitivity_threshold(v));
    }
    Ok(())
}

fn table_text(rows: &[Row], seed: u64) -> String {
    let width = rows.iter().map(|r| r.quantity.len()).max().unwrap_or(0);
    let mut text = format!("acceptance table, seed {seed}\n");
    for r in rows {
        text.push_str(&format!(
            "{:>2}  {}  {:<width$}  {:<14}  target {}\n",
            r.criterion,
            if r.pass { "PASS" } else { "FAIL" },
            r.quantity,
            r.measured,
            r.target,
        ));
    }
    let failed = rows.iter().filter(|r| !r.pass).count();
    text.push_str(&format!("{} rows, {failed} failing\n", rows.len()));
    text
}

fn make_table(seed: Option<u64>, format: TableFormat, out: Option<&Path>) -> Outcome<()> {
    let seed = seed_override()?.or(seed).unwrap_or(DEFAULT_TABLE_SEED);
    let rows = acceptance_table(seed)?;
    let text = match format {
        TableFormat::Text => table_text(&rows, seed),
        TableFormat::Json => {
            format!("{}\n", serde_json::to_string_pretty(&rows).map_err(|e| Failure::Input(e.to_string()))?)
        }
    };
    emit(out, &text)
}

fn run(cli: Cli) -> Outcome<()> {
    match cli.command {
        Command::Simulate { manifest, out, hom_out, manifest_out } => simulate(&manifest, &out, hom_out, manifest_out),
        Command::DefaultManifest { seed } => default_manifest(seed),
        Command::Fit { input, harmonic, manifest, out } => fit(&input, harmonic, manifest.as_deref(), out.as_deref()),
        Command::SenseMap { tau1, tau2, grid, out } => sense_map(tau1, tau2, grid, out.as_deref()),
        Command::Limits { visibility, photons } => report_limits(visibility, photons),
        Command::MakePaperNumbers { seed, format, out } => make_table(seed, format, out.as_deref()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            let (Failure::Input(m) | Failure::Io(m)) = &failure;
            eprintln!("error: {m}");
            ExitCode::from(failure.code())
        }
    }
}
