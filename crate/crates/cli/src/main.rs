//! `cgh`: compute point-cloud holograms from the command line.
//!
//! The flow mirrors how the engine is meant to be used: `build-lut` caches
//! the per-slice sparse coefficient table, `wasabi` turns a point cloud into
//! a complex field through that table, `direct` does the same the
//! conventional way for ground truth, `encode` interferes a field with the
//! reference wave and binarizes it, `reconstruct` propagates a stored
//! hologram back to a depth plane, `bench` times both engines on one scene,
//! and `compare` measures how far two stored fields disagree.

mod report;

use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use cgh_core::config::{LutMode, PointCloud, PointSource};
use cgh_core::direct::{compute_full_direct, DirectVariant};
use cgh_core::encode::{binarize, interfere, reconstruct_intensity, reference_frame, BinarizeRule, Hologram};
use cgh_core::error::CghError;
use cgh_core::io;
use cgh_core::psf::{build_lut, PsfSpec, WasabiLut};
use cgh_core::wasabi::{compute_full, AssembleSink, TileSink};
use cgh_core::{ComplexField64, OpticalConfig64, TileIndex};

use report::{peak_memory_estimate, RunReport};

#[derive(Parser)]
#[command(name = "cgh", version, about = "Point-cloud holograms via sparse wavelet-domain superposition")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

/// Options shared by every command that reads the run configuration.
#[derive(Args)]
struct ConfigArgs {
    /// key = value configuration file
    #[arg(long)]
    config: PathBuf,
    /// Override the worker count from the config
    #[arg(long)]
    threads: Option<usize>,
    /// Store every nonzero coefficient instead of the strongest per slice
    #[arg(long)]
    keep_all: bool,
    /// Snap points to the coarsest-stride grid instead of per-offset lists
    #[arg(long)]
    round_to_grid: bool,
    /// Reject footprints wider than half a tile instead of capping them
    #[arg(long)]
    no_cap: bool,
    /// Treat the reference wave as converging toward its focus
    #[arg(long)]
    ref_converging: bool,
}

impl ConfigArgs {
    fn load(&self) -> anyhow::Result<OpticalConfig64> {
        let mut cfg = io::load_config(&self.config)?;
        if let Some(t) = self.threads {
            cfg.threads = t;
        }
        if self.keep_all {
            cfg.keep_all = true;
        }
        if self.round_to_grid {
            cfg.lut_mode = LutMode::RoundToGrid;
        }
        if self.no_cap {
            cfg.cap_w = false;
        }
        if self.ref_converging {
            cfg.ref_converging = true;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Copy, Clone, PartialEq, Eq, Default, ValueEnum)]
enum VariantArg {
    /// Stamp the full windowed wavefront per point
    #[default]
    Exact,
    /// Stamp the truncated response synthesized from the coefficient table
    Shrunk,
}

#[derive(Copy, Clone, PartialEq, Eq, Default, ValueEnum)]
enum RuleArg {
    /// One where the bipolar intensity is non-negative
    #[default]
    Sign,
    /// One for the upper half of the intensity distribution
    Median,
}

#[derive(Subcommand)]
enum Cmd {
    /// Precompute the per-slice sparse coefficient table
    BuildLut {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Destination table file
        #[arg(long)]
        out: PathBuf,
    },
    /// Wavelet-domain engine: point cloud to complex field
    Wasabi {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Coefficient table from build-lut
        #[arg(long)]
        lut: PathBuf,
        /// Scene file, one "x y z a" line per point (meters)
        #[arg(long)]
        points: PathBuf,
        /// Assembled full-frame field file to write
        #[arg(long)]
        out: Option<PathBuf>,
        /// Directory for one field file per tile
        #[arg(long)]
        tiles_dir: Option<PathBuf>,
    },
    /// Conventional space-domain engine, the accuracy and speed baseline
    Direct {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Scene file, one "x y z a" line per point (meters)
        #[arg(long)]
        points: PathBuf,
        /// Assembled full-frame field file to write
        #[arg(long)]
        out: Option<PathBuf>,
        /// Directory for one field file per tile
        #[arg(long)]
        tiles_dir: Option<PathBuf>,
        /// What to stamp per point
        #[arg(long, value_enum, default_value_t)]
        variant: VariantArg,
        /// Coefficient table, required for --variant shrunk
        #[arg(long)]
        lut: Option<PathBuf>,
    },
    /// Interfere a stored field with the reference wave and binarize it
    Encode {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Complex field file from wasabi or direct
        #[arg(long)]
        field: PathBuf,
        /// Binary plate to write (bit-packed PBM)
        #[arg(long)]
        out: PathBuf,
        /// Thresholding rule
        #[arg(long, value_enum, default_value_t)]
        rule: RuleArg,
        /// Also write the bipolar intensity as a grayscale PGM
        #[arg(long)]
        intensity: Option<PathBuf>,
    },
    /// Propagate a stored hologram back to a depth plane numerically
    Reconstruct {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Complex field file or binary plate (sniffed by magic bytes)
        #[arg(long)]
        input: PathBuf,
        /// Depth of the observation plane in meters
        #[arg(long)]
        z: f64,
        /// Grayscale intensity image to write
        #[arg(long)]
        out: PathBuf,
    },
    /// Time the wavelet engine against the conventional baseline on one scene
    Bench {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Scene file; mutually exclusive with --random
        #[arg(long, conflicts_with = "random")]
        points: Option<PathBuf>,
        /// Generate this many seeded random points instead of reading a file
        #[arg(long)]
        random: Option<usize>,
        /// Only print the tile and per-slice work plan, compute nothing
        #[arg(long)]
        plan_only: bool,
        /// Reuse (or create) a coefficient table at this path
        #[arg(long)]
        lut: Option<PathBuf>,
    },
    /// Per-tile relative L2 error between two stored fields
    Compare {
        a: PathBuf,
        b: PathBuf,
        /// Pixels to ignore at each tile edge
        #[arg(long, default_value_t = 0)]
        margin: usize,
        /// Tile side for the per-tile breakdown; whole frame when omitted
        #[arg(long)]
        tile: Option<usize>,
    },
}

fn main() {
    // die quietly when the reader closes the pipe, like other text tools
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    if let Err(e) = run() {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn run() -> anyhow::Result<()> {
    match Cli::parse().cmd {
        Cmd::BuildLut { cfg, out } => cmd_build_lut(&cfg, &out),
        Cmd::Wasabi { cfg, lut, points, out, tiles_dir } => {
            cmd_wasabi(&cfg, &lut, &points, out.as_deref(), tiles_dir.as_deref())
        }
        Cmd::Direct { cfg, points, out, tiles_dir, variant, lut } => cmd_direct(
            &cfg,
            &points,
            out.as_deref(),
            tiles_dir.as_deref(),
            variant,
            lut.as_deref(),
        ),
        Cmd::Encode { cfg, field, out, rule, intensity } => {
            cmd_encode(&cfg, &field, &out, rule, intensity.as_deref())
        }
        Cmd::Reconstruct { cfg, input, z, out } => cmd_reconstruct(&cfg, &input, z, &out),
        Cmd::Bench { cfg, points, random, plan_only, lut } => {
            cmd_bench(&cfg, points.as_deref(), random, plan_only, lut.as_deref())
        }
        Cmd::Compare { a, b, margin, tile } => cmd_compare(&a, &b, margin, tile),
    }
}

/// Writes each finished tile as its own field file.
struct DirSink {
    dir: PathBuf,
    pitch: f64,
    wavelength: f64,
}

impl TileSink<f64> for DirSink {
    fn accept(&self, tile: TileIndex, field: ComplexField64) -> cgh_core::error::Result<()> {
        let path = self.dir.join(format!("tile_s{}_t{}.hfld", tile.s, tile.t));
        io::write_field(&path, &field, self.pitch, self.wavelength)
    }
}

/// The sink combinations the flags allow.
enum CliSink {
    Assemble(AssembleSink<f64>),
    Dir(DirSink),
    Both(AssembleSink<f64>, DirSink),
    Null,
}

impl CliSink {
    fn new(
        cfg: &OpticalConfig64,
        assemble: bool,
        tiles_dir: Option<&Path>,
    ) -> anyhow::Result<Self> {
        let dir_sink = match tiles_dir {
            Some(dir) => {
                std::fs::create_dir_all(dir)
                    .with_context(|| format!("cannot create {}", dir.display()))?;
                Some(DirSink {
                    dir: dir.to_path_buf(),
                    pitch: cfg.pitch,
                    wavelength: cfg.wavelength,
                })
            }
            None => None,
        };
        Ok(match (assemble, dir_sink) {
            (true, Some(d)) => CliSink::Both(AssembleSink::new(cfg), d),
            (true, None) => CliSink::Assemble(AssembleSink::new(cfg)),
            (false, Some(d)) => CliSink::Dir(d),
            (false, None) => CliSink::Null,
        })
    }

    fn into_field(self) -> Option<ComplexField64> {
        match self {
            CliSink::Assemble(a) | CliSink::Both(a, _) => Some(a.into_field()),
            _ => None,
        }
    }
}

impl TileSink<f64> for CliSink {
    fn accept(&self, tile: TileIndex, field: ComplexField64) -> cgh_core::error::Result<()> {
        match self {
            CliSink::Assemble(a) => a.accept(tile, field),
            CliSink::Dir(d) => d.accept(tile, field),
            CliSink::Both(a, d) => {
                d.accept(tile, field.clone())?;
                a.accept(tile, field)
            }
            CliSink::Null => Ok(()),
        }
    }
}

fn cmd_build_lut(cfg_args: &ConfigArgs, out: &Path) -> anyhow::Result<()> {
    let cfg = cfg_args.load()?;
    let t0 = Instant::now();
    let lut = build_lut(&cfg)?;
    let built = t0.elapsed().as_secs_f64();
    io::write_lut(out, &lut)?;
    let stats = lut.stats();
    println!(
        "built {} lists ({} entries, {} shorter than requested) in {built:.3} s",
        stats.lists, stats.total_entries, stats.clamped_lists
    );
    println!("wrote {}", out.display());
    Ok(())
}

/// Load a table, turning the two most common mistakes into actionable
/// messages: no file yet, and a file built from different parameters.
fn load_lut_checked(
    path: &Path,
    cfg: &OpticalConfig64,
    cfg_path: &Path,
) -> anyhow::Result<WasabiLut<f64>> {
    if !path.exists() {
        bail!(
            "no coefficient table at {}; build it first:\n  cgh build-lut --config {} --out {}",
            path.display(),
            cfg_path.display(),
            path.display()
        );
    }
    match io::load_lut(path, cfg) {
        Err(CghError::StaleLut) => bail!(
            "the table at {} was built from a different configuration (depth sampling, \
             gamma, level, filter, tile size, or the --keep-all/--round-to-grid/--no-cap \
             flags differ); rebuild it:\n  cgh build-lut --config {} --out {}",
            path.display(),
            cfg_path.display(),
            path.display()
        ),
        other => Ok(other?),
    }
}

fn cmd_wasabi(
    cfg_args: &ConfigArgs,
    lut_path: &Path,
    points_path: &Path,
    out: Option<&Path>,
    tiles_dir: Option<&Path>,
) -> anyhow::Result<()> {
    let cfg = cfg_args.load()?;
    let cloud = io::load_points::<f64>(points_path)?;
    let t0 = Instant::now();
    let lut = load_lut_checked(lut_path, &cfg, &cfg_args.config)?;
    let lut_s = t0.elapsed().as_secs_f64();

    let sink = CliSink::new(&cfg, out.is_some(), tiles_dir)?;
    let stats = compute_full(&cloud, &cfg, &lut, &sink)?;
    if let (Some(path), Some(field)) = (out, sink.into_field()) {
        io::write_field(path, &field, cfg.pitch, cfg.wavelength)?;
        println!("wrote {}", path.display());
    }

    let mut rep = RunReport::from_config(&cfg);
    rep.n_points = stats.points_in;
    rep.skipped_points = stats.skipped_points;
    rep.lut_s = lut_s;
    rep.superpose_cpu_s = stats.superpose_seconds;
    rep.ifwt_cpu_s = stats.ifwt_seconds;
    rep.wasabi_wall_s = Some(stats.wall_seconds);
    rep.ops = Some(stats.ops);
    rep.dropped = Some(stats.dropped_coeffs);
    rep.peak_mem_bytes = peak_memory_estimate(&cfg, lut.stats().total_entries, out.is_some());
    rep.print_human();
    rep.print_machine();
    Ok(())
}

fn cmd_direct(
    cfg_args: &ConfigArgs,
    points_path: &Path,
    out: Option<&Path>,
    tiles_dir: Option<&Path>,
    variant: VariantArg,
    lut_path: Option<&Path>,
) -> anyhow::Result<()> {
    let cfg = cfg_args.load()?;
    let cloud = io::load_points::<f64>(points_path)?;
    let (variant, lut) = match variant {
        VariantArg::Exact => (DirectVariant::Exact, None),
        VariantArg::Shrunk => {
            let path = lut_path
                .ok_or_else(|| anyhow::anyhow!("--variant shrunk needs --lut <table>"))?;
            let lut = load_lut_checked(path, &cfg, &cfg_args.config)?;
            (DirectVariant::Shrunk, Some(lut))
        }
    };

    let sink = CliSink::new(&cfg, out.is_some(), tiles_dir)?;
    let stats = compute_full_direct(&cloud, &cfg, lut.as_ref(), variant, &sink)?;
    if let (Some(path), Some(field)) = (out, sink.into_field()) {
        io::write_field(path, &field, cfg.pitch, cfg.wavelength)?;
        println!("wrote {}", path.display());
    }

    let mut rep = RunReport::from_config(&cfg);
    rep.n_points = stats.points_in;
    rep.skipped_points = stats.skipped_points;
    rep.baseline_wall_s = Some(stats.wall_seconds);
    rep.stamped_px = Some(stats.stamped_px);
    let entries = lut.as_ref().map_or(0, |l| l.stats().total_entries);
    rep.peak_mem_bytes = peak_memory_estimate(&cfg, entries, out.is_some());
    rep.print_human();
    rep.print_machine();
    Ok(())
}

fn cmd_encode(
    cfg_args: &ConfigArgs,
    field_path: &Path,
    out: &Path,
    rule: RuleArg,
    intensity_out: Option<&Path>,
) -> anyhow::Result<()> {
    let cfg = cfg_args.load()?;
    let file = io::read_field::<f64>(field_path)?;
    if file.field.width() != cfg.n_w || file.field.height() != cfg.n_w {
        bail!(
            "{} holds a {} x {} field but the config frame is {} x {}",
            field_path.display(),
            file.field.width(),
            file.field.height(),
            cfg.n_w,
            cfg.n_w
        );
    }
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * a.abs().max(b.abs());
    if !close(file.pitch, cfg.pitch) || !close(file.wavelength, cfg.wavelength) {
        bail!(
            "{} was computed at pitch {} / wavelength {}, but the config says {} / {}",
            field_path.display(),
            file.pitch,
            file.wavelength,
            cfg.pitch,
            cfg.wavelength
        );
    }

    let t0 = Instant::now();
    let r = reference_frame(&cfg);
    let bipolar = interfere(&file.field, &r)?;
    let rule = match rule {
        RuleArg::Sign => BinarizeRule::Sign,
        RuleArg::Median => BinarizeRule::Median,
    };
    let bits = binarize(&bipolar, rule);
    let encode_s = t0.elapsed().as_secs_f64();

    io::write_pbm(out, &bits)?;
    println!("wrote {}", out.display());
    if let Some(path) = intensity_out {
        io::write_pgm(path, &bipolar)?;
        println!("wrote {}", path.display());
    }
    let ones = bits.count_ones();
    let total = cfg.n_w * cfg.n_w;
    println!(
        "plate       {} x {} px, {ones} of {total} transparent ({:.1}%), encoded in {encode_s:.3} s",
        cfg.n_w,
        cfg.n_w,
        100.0 * ones as f64 / total as f64
    );
    Ok(())
}

fn cmd_reconstruct(cfg_args: &ConfigArgs, input: &Path, z: f64, out: &Path) -> anyhow::Result<()> {
    let cfg = cfg_args.load()?;
    let head = {
        let mut buf = [0u8; 4];
        let n = std::io::Read::read(
            &mut std::fs::File::open(input)
                .with_context(|| format!("cannot open {}", input.display()))?,
            &mut buf,
        )?;
        buf[..n].to_vec()
    };
    let holo = if head.starts_with(b"HFLD") {
        Hologram::Complex(io::read_field::<f64>(input)?.field)
    } else if head.starts_with(b"P4") {
        Hologram::Binary(io::read_pbm(input)?)
    } else {
        bail!(
            "{} is neither a complex field file nor a bit-packed PBM plate",
            input.display()
        );
    };

    let recon = reconstruct_intensity(&holo, z, &cfg)?;
    io::write_pgm(out, &recon)?;
    let (px, py, peak) = recon.argmax();
    println!("wrote {}", out.display());
    println!("peak        intensity {peak:.3e} at pixel ({px}, {py}), plane z = {z:e} m");
    Ok(())
}

fn random_cloud(cfg: &OpticalConfig64, n: usize) -> PointCloud<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let half = cfg.n_w as f64 / 2.0 * cfg.pitch;
    PointCloud::new(
        (0..n)
            .map(|_| PointSource {
                x: rng.random_range(-half..half),
                y: rng.random_range(-half..half),
                z: if cfg.z_max > cfg.z_min {
                    rng.random_range(cfg.z_min..cfg.z_max)
                } else {
                    cfg.z_min
                },
                a: 1.0,
            })
            .collect(),
    )
}

/// Closed-form preview of a run: tile layout, per-slice footprints and list
/// lengths, and the memory the table itself would take. Nothing is computed,
/// so this works at full production scale.
fn print_plan(cfg: &OpticalConfig64, n_points: usize) -> anyhow::Result<()> {
    let tps = cfg.tiles_per_side();
    println!(
        "frame       {} x {} px, tile {}, planned as {} x {} = {} tiles",
        cfg.n_w,
        cfg.n_w,
        cfg.n_h,
        tps,
        tps,
        cfg.tile_count()
    );
    println!(
        "depth       {} slices over [{} m, {} m], {} offset classes per slice",
        cfg.n_z,
        cfg.z_min,
        cfg.z_max,
        cfg.classes_per_slice()
    );
    let mut per_point_ops = 0usize;
    let mut table_entries = 0usize;
    for i in 0..cfg.n_z {
        let spec = PsfSpec::for_slice(i, cfg)?;
        println!(
            "slice {i:>3}   z {:+.4e} m, footprint {} px, {} coefficients kept per point",
            spec.z_c,
            spec.footprint(),
            spec.n_r
        );
        per_point_ops += spec.n_r;
        table_entries += spec.n_r * cfg.classes_per_slice();
    }
    println!(
        "work        about {per_point_ops} adds per point averaged over depth ({} points given)",
        n_points
    );
    if cfg.keep_all {
        println!("table       every nonzero coefficient kept; size depends on the transforms");
    } else {
        let bytes = table_entries * 26;
        println!("table       about {table_entries} entries, {} MiB on disk", bytes >> 20);
    }
    println!();
    println!("tiles_x = {tps}");
    println!("tiles_y = {tps}");
    println!("tile_count = {}", cfg.tile_count());
    Ok(())
}

fn cmd_bench(
    cfg_args: &ConfigArgs,
    points_path: Option<&Path>,
    random: Option<usize>,
    plan_only: bool,
    lut_path: Option<&Path>,
) -> anyhow::Result<()> {
    let cfg = cfg_args.load()?;
    let cloud = match (points_path, random) {
        (Some(p), _) => io::load_points::<f64>(p)?,
        (None, Some(n)) => random_cloud(&cfg, n),
        (None, None) if plan_only => PointCloud::new(Vec::new()),
        (None, None) => bail!("give a scene with --points <file> or --random <count>"),
    };

    if plan_only {
        return print_plan(&cfg, cloud.len());
    }

    // table: reuse a file when offered, build otherwise; the build also
    // persists when a path was named so reruns skip it
    let t0 = Instant::now();
    let lut = match lut_path {
        Some(path) if path.exists() => load_lut_checked(path, &cfg, &cfg_args.config)?,
        Some(path) => {
            let lut = build_lut(&cfg)?;
            io::write_lut(path, &lut)?;
            lut
        }
        None => build_lut(&cfg)?,
    };
    let lut_s = t0.elapsed().as_secs_f64();

    // both engines feed a discarding sink: the comparison is calculation
    // time, and neither side should pay for assembly or disk
    let sink = CliSink::Null;
    let wasabi = compute_full(&cloud, &cfg, &lut, &sink)?;
    let baseline = compute_full_direct(&cloud, &cfg, None, DirectVariant::Exact, &sink)?;

    let mut rep = RunReport::from_config(&cfg);
    rep.n_points = wasabi.points_in;
    rep.skipped_points = wasabi.skipped_points;
    rep.lut_s = lut_s;
    rep.superpose_cpu_s = wasabi.superpose_seconds;
    rep.ifwt_cpu_s = wasabi.ifwt_seconds;
    rep.wasabi_wall_s = Some(wasabi.wall_seconds);
    rep.baseline_wall_s = Some(baseline.wall_seconds);
    rep.ops = Some(wasabi.ops);
    rep.dropped = Some(wasabi.dropped_coeffs);
    rep.stamped_px = Some(baseline.stamped_px);
    rep.peak_mem_bytes = peak_memory_estimate(&cfg, lut.stats().total_entries, false);
    rep.print_human();
    rep.print_machine();
    Ok(())
}

fn subfield(f: &ComplexField64, x0: usize, y0: usize, side: usize) -> ComplexField64 {
    let mut data = Vec::with_capacity(side * side);
    for y in y0..y0 + side {
        data.extend_from_slice(&f.row(y)[x0..x0 + side]);
    }
    ComplexField64::from_vec(side, side, data).expect("window stays inside the field")
}

fn cmd_compare(a: &Path, b: &Path, margin: usize, tile: Option<usize>) -> anyhow::Result<()> {
    let fa = io::read_field::<f64>(a)?;
    let fb = io::read_field::<f64>(b)?;
    let (w, h) = (fa.field.width(), fa.field.height());
    if fb.field.width() != w || fb.field.height() != h {
        bail!(
            "shapes differ: {} is {} x {}, {} is {} x {}",
            a.display(),
            w,
            h,
            b.display(),
            fb.field.width(),
            fb.field.height()
        );
    }
    let side = tile.unwrap_or(w);
    if side == 0 || w % side != 0 || h % side != 0 {
        bail!("tile {side} does not divide the {w} x {h} frame");
    }
    if 2 * margin >= side {
        bail!("margin {margin} swallows the whole {side} px tile");
    }
    let mut worst = 0.0f64;
    for t in 0..h / side {
        for s in 0..w / side {
            let ta = subfield(&fa.field, s * side, t * side, side);
            let tb = subfield(&fb.field, s * side, t * side, side);
            let err = cgh_core::field::rel_l2_error(&ta, &tb, margin);
            if w / side > 1 || h / side > 1 {
                println!("tile {s},{t}: error = {err:.3e}");
            }
            worst = worst.max(err);
        }
    }
    println!("error = {worst:.3e}");
    Ok(())
}
