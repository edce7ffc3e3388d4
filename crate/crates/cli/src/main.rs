use std::fs::{self, File};
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use oms_core::gmra::{audit_axioms, build_gmra, GmraParams};
use oms_core::harness::datasets::sample_sphere;
use oms_core::harness::experiment::{run_experiment, write_csv, ExperimentConfig};
use oms_core::harness::width::{run_width, write_width_csv, WidthConfig};
use oms_core::recovery::{recover, CenterSigns, RecoveryOptions, SearchMode, Variant, DEFAULT_RADIUS};
use oms_core::{BitVector, Ensemble, Error, Gmra, PointCloud};

#[derive(Parser)]
#[command(name = "oms", version, about = "One-bit compressed sensing on manifolds")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// GMRA construction.
    Gmra {
        #[command(subcommand)]
        action: GmraCommand,
    },
    /// Sample the unit d-sphere embedded in R^D into a point-cloud file.
    Sphere(SphereArgs),
    /// Draw a Gaussian ensemble and one-bit measurements of signals.
    Encode(EncodeArgs),
    /// Recover signals from one-bit measurements.
    Recover(RecoverArgs),
    /// Run an experiment config and write its CSV.
    Bench {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run a width-diagnostics config and write its CSV.
    Width {
        #[arg(long)]
        config: PathBuf,
    },
    /// Report GMRA axiom diagnostics per level.
    Audit {
        #[arg(long)]
        gmra: PathBuf,
        /// Sample points for the error and tube columns.
        #[arg(long)]
        points: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum GmraCommand {
    Build(BuildArgs),
}

#[derive(Args)]
struct BuildArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    d: usize,
    #[arg(long)]
    jmin: Option<i32>,
    #[arg(long)]
    jmax: Option<i32>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SphereArgs {
    #[arg(long)]
    d: usize,
    #[arg(long = "ambient", short = 'D')]
    ambient: usize,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EncodeArgs {
    #[arg(long)]
    gmra: PathBuf,
    #[arg(long)]
    m: usize,
    #[arg(long)]
    seed: u64,
    /// Signals to measure (point-cloud file).
    #[arg(long)]
    signals: PathBuf,
    #[arg(long, default_value = "ensemble.omsa")]
    out_ensemble: PathBuf,
    /// One line of `+`/`-` per signal; stdout when omitted.
    #[arg(long)]
    out_bits: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum VariantArg {
    Oms,
    OmsSimple,
    OmsPlus,
    CenterOnly,
}

#[derive(Args)]
struct RecoverArgs {
    #[arg(long)]
    gmra: PathBuf,
    #[arg(long)]
    j: i32,
    #[arg(long, value_enum, default_value = "oms")]
    variant: VariantArg,
    /// Radius for oms-simple.
    #[arg(long = "R", default_value_t = DEFAULT_RADIUS)]
    radius: f64,
    /// Beam width; exhaustive search when omitted.
    #[arg(long)]
    beam: Option<usize>,
    #[arg(long)]
    ensemble: PathBuf,
    /// Bits file written by `encode`.
    #[arg(long)]
    bits: PathBuf,
    /// Recovered signals (point-cloud file).
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match Cli::parse().command {
        Command::Gmra {
            action: GmraCommand::Build(args),
        } => gmra_build(args),
        Command::Sphere(args) => {
            let cloud = sample_sphere(args.d, args.ambient, args.n, args.seed)?;
            write_cloud(&args.out, &cloud)
        }
        Command::Encode(args) => encode(args),
        Command::Recover(args) => recover_cmd(args),
        Command::Bench { config } => bench(&config),
        Command::Width { config } => width(&config),
        Command::Audit { gmra, points } => audit(&gmra, points.as_deref()),
    }
}

fn read_cloud(path: &Path) -> Result<PointCloud> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    Ok(PointCloud::read_from(BufReader::new(file))?)
}

fn write_cloud(path: &Path, cloud: &PointCloud) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    cloud.write_to(&mut w)?;
    w.flush()?;
    Ok(())
}

fn read_gmra(path: &Path) -> Result<Gmra> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    Ok(Gmra::read_from(BufReader::new(file))?)
}

fn gmra_build(args: BuildArgs) -> Result<()> {
    let points = read_cloud(&args.input)?;
    let params = GmraParams {
        intrinsic_dim: args.d,
        j_min: args.jmin,
        j_max: args.jmax,
    };
    let gmra = build_gmra(&points, params)?;
    for w in gmra.warnings() {
        log::warn!("{w:?}");
    }
    let mut out = BufWriter::new(File::create(&args.out)?);
    gmra.write_to(&mut out)?;
    out.flush()?;
    println!(
        "levels {}..={}, cells {:?}",
        gmra.j_min(),
        gmra.j_max(),
        gmra.levels().iter().map(|l| l.len()).collect::<Vec<_>>()
    );
    Ok(())
}

fn encode(args: EncodeArgs) -> Result<()> {
    let gmra = read_gmra(&args.gmra)?;
    let signals = read_cloud(&args.signals)?;
    if signals.dim() != gmra.ambient_dim() {
        bail!("signals have dimension {}, GMRA expects {}", signals.dim(), gmra.ambient_dim());
    }
    let ens = Ensemble::gaussian(args.m, gmra.ambient_dim(), args.seed)?;
    let mut w = BufWriter::new(File::create(&args.out_ensemble)?);
    ens.write_to(&mut w)?;
    w.flush()?;
    let mut text = String::new();
    for x in signals.points() {
        text.push_str(&ens.quantize(x)?.to_text());
        text.push('\n');
    }
    match args.out_bits {
        Some(path) => fs::write(path, text)?,
        None => io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn recover_cmd(args: RecoverArgs) -> Result<()> {
    let gmra = read_gmra(&args.gmra)?;
    let ens = Ensemble::read_from(BufReader::new(File::open(&args.ensemble)?))?;
    let search = args.beam.map_or(SearchMode::Exhaustive, SearchMode::Beam);
    let variant = match args.variant {
        VariantArg::Oms => Variant::Oms,
        VariantArg::OmsPlus => Variant::OmsPlus,
        VariantArg::OmsSimple => Variant::OmsSimple { radius: args.radius },
        VariantArg::CenterOnly => Variant::CenterOnly,
    };
    let options = RecoveryOptions::new(variant, search);
    let signs = CenterSigns::build(&gmra, &ens, args.j, search)?;
    let mut data = Vec::new();
    let mut stdout = io::stdout().lock();
    writeln!(stdout, "signal\tcenter\tcenter_hamming\tstep_two\tresidual_hamming")?;
    for (i, line) in BufReader::new(File::open(&args.bits)?).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let y = BitVector::parse_text(&line)?;
        match recover(&gmra, args.j, &ens, &signs, &y, &options) {
            Ok(r) => {
                writeln!(
                    stdout,
                    "{i}\t{}\t{}\t{}\t{}",
                    r.center_index, r.center_hamming, r.used_step_two, r.residual_hamming
                )?;
                data.extend(r.x_star);
            }
            Err(Error::Infeasible { c_norm, radius }) => {
                writeln!(stdout, "{i}\tinfeasible (|c| = {c_norm:.4} > R = {radius})")?;
                data.extend(std::iter::repeat_n(f64::NAN, gmra.ambient_dim()));
            }
            Err(e) => return Err(e.into()),
        }
    }
    if let Some(path) = args.out {
        write_cloud(&path, &PointCloud::new(gmra.ambient_dim(), data)?)?;
    }
    Ok(())
}

fn bench(path: &Path) -> Result<()> {
    let config = ExperimentConfig::load(path)?;
    let rows = run_experiment(&config)?;
    if config.output.is_none() {
        write_csv(io::stdout().lock(), &rows)?;
    }
    Ok(())
}

fn width(path: &Path) -> Result<()> {
    let config = WidthConfig::load(path)?;
    let rows = run_width(&config)?;
    match &config.output {
        Some(out) => write_width_csv(File::create(out)?, &rows)?,
        None => write_width_csv(io::stdout().lock(), &rows)?,
    }
    Ok(())
}

fn audit(gmra_path: &Path, points: Option<&Path>) -> Result<()> {
    let gmra = read_gmra(gmra_path)?;
    let points = points.map(read_cloud).transpose()?;
    let report = audit_axioms(&gmra, points.as_ref())?;
    let opt = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{v:.4e}"));
    println!("j\tcells\tC1\tparent_C2\ttube\tmean_err\tadmissible\tdegenerate\tties");
    for l in &report.levels {
        println!(
            "{}\t{}\t{:.4}\t{}\t{}\t{}\t{}\t{}\t{}",
            l.scale,
            l.cells,
            l.separation_c1,
            opt(l.parent_c2),
            opt(l.tube_distance),
            opt(l.mean_error),
            opt(l.admissible_ratio),
            l.degenerate_cells,
            l.spectral_ties
        );
    }
    if let Some(e) = report.decay_exponent {
        println!("decay exponent {e:.3}");
    }
    Ok(())
}
