//! Run accounting printed after every compute command: a human summary and
//! a machine-readable key = value block. Everything except the timing
//! fields is deterministic for a fixed scene and configuration.

use cgh_core::OpticalConfig64;

/// Published full-scale figures the benchmark prints alongside its own
/// measurements, so a run on capable hardware can be judged against them.
pub const REFERENCE_FRAME: &str = "65,536 x 65,536 px";
pub const REFERENCE_POINTS: usize = 95_949;
pub const REFERENCE_CONVENTIONAL_S: f64 = 10_533.0;
pub const REFERENCE_WAVELET_S: f64 = 354.0;

#[derive(Debug, Clone, Default)]
pub struct RunReport {
    pub n_points: usize,
    pub skipped_points: u64,
    pub n_w: usize,
    pub n_h: usize,
    pub tiles_per_side: usize,
    pub n_z: usize,
    pub gamma: f64,
    /// Seconds to build or load the coefficient table.
    pub lut_s: f64,
    /// CPU seconds summed across workers, so these can exceed wall time.
    pub superpose_cpu_s: f64,
    pub ifwt_cpu_s: f64,
    pub encode_s: f64,
    pub wasabi_wall_s: Option<f64>,
    pub baseline_wall_s: Option<f64>,
    pub ops: Option<u64>,
    pub dropped: Option<u64>,
    pub stamped_px: Option<u64>,
    pub peak_mem_bytes: u64,
}

impl RunReport {
    pub fn from_config(cfg: &OpticalConfig64) -> Self {
        RunReport {
            n_w: cfg.n_w,
            n_h: cfg.n_h,
            tiles_per_side: cfg.tiles_per_side(),
            n_z: cfg.n_z,
            gamma: cfg.gamma,
            ..RunReport::default()
        }
    }

    /// Wall-clock ratio of the conventional engine to the wavelet engine.
    pub fn speedup(&self) -> Option<f64> {
        match (self.baseline_wall_s, self.wasabi_wall_s) {
            (Some(b), Some(w)) if w > 0.0 => Some(b / w),
            _ => None,
        }
    }

    pub fn print_human(&self) {
        println!(
            "scene       {} points ({} outside the frame or depth range, skipped)",
            self.n_points, self.skipped_points
        );
        println!(
            "frame       {} x {} px as {} x {} tiles of {}",
            self.n_w, self.n_w, self.tiles_per_side, self.tiles_per_side, self.n_h
        );
        println!(
            "depth       {} slices, selectivity gamma = {}",
            self.n_z, self.gamma
        );
        println!(
            "phases      table {:.3} s, superpose {:.3} s (cpu), inverse transform {:.3} s (cpu), encode {:.3} s",
            self.lut_s, self.superpose_cpu_s, self.ifwt_cpu_s, self.encode_s
        );
        if let Some(w) = self.wasabi_wall_s {
            match self.baseline_wall_s {
                Some(b) => println!("wall        wavelet {w:.3} s, baseline {b:.3} s"),
                None => println!("wall        wavelet {w:.3} s"),
            }
        } else if let Some(b) = self.baseline_wall_s {
            println!("wall        baseline {b:.3} s");
        }
        if let Some(s) = self.speedup() {
            println!("speedup     {s:.2}x over the conventional baseline");
        }
        if let (Some(ops), Some(dropped)) = (self.ops, self.dropped) {
            println!("work        {ops} coefficient adds, {dropped} dropped at band edges");
        }
        if let Some(px) = self.stamped_px {
            println!("work        {px} pixels stamped by the baseline");
        }
        println!(
            "memory      about {} MiB peak (frame, per-worker tiles, table)",
            self.peak_mem_bytes >> 20
        );
        println!(
            "reference   published full-scale run ({REFERENCE_FRAME}, {REFERENCE_POINTS} points): \
             conventional {REFERENCE_CONVENTIONAL_S:.0} s, wavelet {REFERENCE_WAVELET_S:.0} s, \
             about {:.0}x",
            REFERENCE_CONVENTIONAL_S / REFERENCE_WAVELET_S
        );
    }

    /// The key = value block scripts parse. Keys appear in a fixed order;
    /// absent measurements are omitted rather than printed as zeros.
    pub fn print_machine(&self) {
        println!();
        println!("n_points = {}", self.n_points);
        println!("skipped_points = {}", self.skipped_points);
        println!("n_w = {}", self.n_w);
        println!("n_h = {}", self.n_h);
        println!("tiles_x = {}", self.tiles_per_side);
        println!("tiles_y = {}", self.tiles_per_side);
        println!("n_z = {}", self.n_z);
        println!("gamma = {}", self.gamma);
        println!("lut_s = {:.6}", self.lut_s);
        println!("superpose_cpu_s = {:.6}", self.superpose_cpu_s);
        println!("ifwt_cpu_s = {:.6}", self.ifwt_cpu_s);
        println!("encode_s = {:.6}", self.encode_s);
        if let Some(w) = self.wasabi_wall_s {
            println!("wasabi_wall_s = {w:.6}");
        }
        if let Some(b) = self.baseline_wall_s {
            println!("baseline_wall_s = {b:.6}");
        }
        if let Some(s) = self.speedup() {
            println!("speedup = {s:.4}");
        }
        if let Some(ops) = self.ops {
            println!("ops = {ops}");
        }
        if let Some(d) = self.dropped {
            println!("dropped = {d}");
        }
        if let Some(px) = self.stamped_px {
            println!("stamped_px = {px}");
        }
        println!("peak_mem_mib = {}", self.peak_mem_bytes >> 20);
        println!("reference_points = {REFERENCE_POINTS}");
        println!("reference_conventional_s = {REFERENCE_CONVENTIONAL_S:.0}");
        println!("reference_wavelet_s = {REFERENCE_WAVELET_S:.0}");
    }
}

/// Deterministic memory estimate: the assembled frame (when one is kept),
/// three tile-sized complex buffers per worker (accumulator pyramid, inverse
/// transform scratch, finished tile), and the coefficient table.
pub fn peak_memory_estimate(cfg: &OpticalConfig64, lut_entries: usize, assembled: bool) -> u64 {
    let px = 16u64; // one Complex<f64>
    let frame = if assembled {
        (cfg.n_w as u64).pow(2) * px
    } else {
        0
    };
    let tiles = cfg.threads.max(1) as u64 * 3 * (cfg.n_h as u64).pow(2) * px;
    let table = lut_entries as u64
        * std::mem::size_of::<cgh_core::wavelet::CoeffEntry<f64>>() as u64;
    frame + tiles + table
}
