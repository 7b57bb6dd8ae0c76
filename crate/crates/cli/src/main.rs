//! `citystream`: generate, lint and summarize procedural urban-scene streams.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use citystream_core::output::{read_manifest, read_telemetry, ManifestStats, CLASS_NAMES, MANIFEST_FILE};
use citystream_core::stream::TransformKind;
use citystream_core::{build_preset, parse_config, run_stream, Preset, RunOptions, Split, StreamConfig};

#[derive(Parser)]
#[command(name = "citystream", version, about = "Deterministic procedural urban-scene stream generator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a stream from a config file or a named preset.
    Generate(GenerateArgs),
    /// Check a config file and print it with every default filled in.
    Validate {
        config: PathBuf,
        /// Only report errors.
        #[arg(long)]
        quiet: bool,
    },
    /// Summarize a generated stream: class balance, throughput, drop counters.
    Stats { dir: PathBuf },
}

#[derive(Args)]
struct GenerateArgs {
    /// JSON config document.
    #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
    config: Option<PathBuf>,
    /// incremental_class, incremental_lighting or incremental_weather.
    #[arg(long)]
    preset: Option<Preset>,
    /// Root seed; overrides the config's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Preset split.
    #[arg(long, default_value = "train")]
    split: Split,
    #[arg(long)]
    out: PathBuf,
    /// Write full frame buffers.
    #[arg(long)]
    frames: bool,
    /// Write classification patches (the default when neither output is chosen).
    #[arg(long)]
    patches: bool,
    #[arg(long, default_value = "none")]
    transform: TransformKind,
    /// Worker threads for rendering; defaults to all cores.
    #[arg(long)]
    threads: Option<usize>,
    /// Stop after this many frames.
    #[arg(long)]
    max_frames: Option<u64>,
    /// Comma-separated render modes, replacing the config's list.
    #[arg(long, value_delimiter = ',')]
    modes: Option<Vec<String>>,
    /// Tiles per sub-sequence, replacing the config's counts.
    #[arg(long)]
    tiles: Option<u64>,
    /// Progress line interval in frames; 0 disables.
    #[arg(long, default_value_t = 500)]
    progress: u64,
}

fn load_config(args: &GenerateArgs) -> Result<StreamConfig> {
    let base = match (&args.config, args.preset) {
        (Some(path), _) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            parse_config(&text).with_context(|| format!("in {}", path.display()))?
        }
        (None, Some(p)) => build_preset(p, args.seed.unwrap_or(0), args.split),
        (None, None) => bail!("either --config or --preset is required"),
    };
    let mut doc = base.document.clone();
    if let Some(seed) = args.seed {
        doc.seed = seed;
    }
    if let Some(modes) = &args.modes {
        doc.modes = modes.clone();
    }
    if let Some(n) = args.tiles {
        for s in &mut doc.subsequences {
            s.tiles = n;
        }
    }
    if doc == base.document {
        return Ok(base);
    }
    Ok(StreamConfig::from_document(doc)?)
}

fn generate(args: GenerateArgs) -> Result<()> {
    let config = load_config(&args)?;
    let options = RunOptions {
        emit_frames: args.frames,
        emit_patches: args.patches || !args.frames,
        transform: args.transform,
        max_frames: args.max_frames,
        progress_every: (args.progress > 0).then_some(args.progress),
        ..RunOptions::default()
    };
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = args.threads {
        pool = pool.num_threads(n);
    }
    let pool = pool.build().context("starting worker threads")?;
    let summary = pool.install(|| run_stream(&config, &args.out, &options))?;
    let t = &summary.telemetry;
    println!(
        "{} frames, {} patches in {:.1} s ({:.1} fps generation, {:.1} fps wall, {} threads)",
        t.frames,
        summary.stats.total_patches(),
        t.elapsed_seconds,
        t.fps_generation,
        t.fps_wall,
        t.threads
    );
    println!("manifest: {}", summary.manifest.display());
    Ok(())
}

fn validate(path: &Path, quiet: bool) -> Result<()> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let config = parse_config(&text).with_context(|| format!("in {}", path.display()))?;
    if !quiet {
        println!("{}", config.to_json_pretty());
    }
    eprintln!("ok: config hash {}", config.hash);
    Ok(())
}

fn stats(dir: &Path) -> Result<()> {
    let records = read_manifest(&dir.join(MANIFEST_FILE))?;
    let s = ManifestStats::from_records(&records);
    println!("frames {}  captured {}  duplicates skipped {}", s.frames, s.captured, s.duplicates);
    println!();
    print!("{}", s.balance_table());
    if s.patches_by_t.len() > 1 {
        println!();
        print!("{:<4}", "t");
        for name in CLASS_NAMES {
            print!("{name:>12}");
        }
        println!();
        for (t, counts) in &s.patches_by_t {
            print!("{t:<4}");
            for n in counts {
                print!("{n:>12}");
            }
            println!();
        }
    }
    let d = &s.drops;
    println!();
    println!(
        "extraction drops: too_small {}  overlapping {}  oversize {}  background_rejected {}",
        d.too_small, d.overlapping, d.oversize, d.background_rejected
    );
    let p = s.placement_drops;
    println!(
        "placement drops: building {}  tree {}  lamp {}  human {}  vehicle {}  (vehicle spawns blocked {})",
        p[0], p[1], p[2], p[3], p[4], s.vehicle_spawn_drops
    );
    match read_telemetry(dir)? {
        Some(t) => println!(
            "throughput: {:.2} fps generation, {:.2} fps wall over {} frames ({} threads, modes {})",
            t.fps_generation,
            t.fps_wall,
            t.frames,
            t.threads,
            t.modes.join(",")
        ),
        None => println!("throughput: no telemetry"),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Generate(args) => generate(args),
        Command::Validate { config, quiet } => validate(&config, quiet),
        Command::Stats { dir } => stats(&dir),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
