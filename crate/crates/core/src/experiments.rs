//! Filtering workloads, Monte Carlo replication and energy/delay statistics.

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::image::Image;
use crate::network::{self, build_grid, init_state, run_until, RunOptions, Simulator, StopRule, Trace};
use crate::params::ParamSet;
use crate::Error;

/// Two-pixel annulus r−1 ≤ d < r+1 around the grid centre with r = n/3; +1
/// on the ring, −1 elsewhere.
pub fn gen_circle_image(n: usize) -> Result<Image, Error> {
    if n < 3 {
        return Err(Error::Dimension(format!("circle image needs n >= 3, got {n}")));
    }
    let c = (n as f64 - 1.0) / 2.0;
    let radius = n as f64 / 3.0;
    let mut pixels = Vec::with_capacity(n * n);
    for r in 0..n {
        for col in 0..n {
            let d = (r as f64 - c).hypot(col as f64 - c);
            pixels.push(if d >= radius - 1.0 && d < radius + 1.0 { 1 } else { -1 });
        }
    }
    Image::new(n, n, pixels)
}

/// Flips exactly round(fraction·N) distinct pixels chosen uniformly.
pub fn apply_noise<R: rand::Rng + ?Sized>(image: &Image, fraction: f64, rng: &mut R) -> Image {
    let count = ((fraction * image.len() as f64).round() as usize).min(image.len());
    let mut out = image.clone();
    for i in index::sample(rng, image.len(), count) {
        out.flip(i);
    }
    out
}

/// splitmix64 finalizer over (base, index); used to give every replica its
/// own seed independent of scheduling.
pub fn derive_seed(base: u64, index: u64) -> u64 {
    let mut z = base ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Workload {
    pub image: Image,
    pub noise_fraction: f64,
    pub replicas: usize,
    /// Drive voltages [V].
    pub drives: Vec<f64>,
    /// IR resistivities [mΩ·cm].
    pub rhos: Vec<f64>,
    /// Error thresholds [%].
    pub targets: Vec<f64>,
    pub seed: u64,
    /// Simulated time limit per replica [s].
    pub max_t: f64,
    /// Run every replica to `max_t` so the final error is a steady-state
    /// reading; otherwise stop once every target is reached.
    pub run_to_max_t: bool,
}

impl Workload {
    pub fn validate(&self) -> Result<(), Error> {
        let bad = |m: String| Err(Error::Workload(m));
        if !(0.0..1.0).contains(&self.noise_fraction) {
            return bad(format!("noise fraction {} outside [0, 1)", self.noise_fraction));
        }
        if self.replicas == 0 {
            return bad("replicas must be at least 1".into());
        }
        if self.drives.is_empty() || self.rhos.is_empty() || self.targets.is_empty() {
            return bad("every sweep list needs at least one entry".into());
        }
        if let Some(t) = self.targets.iter().find(|t| !(**t > 0.0 && **t < 200.0)) {
            return bad(format!("target {t} outside (0, 200)"));
        }
        if !(self.max_t >= 0.0) {
            return bad(format!("max_t {} must be >= 0", self.max_t));
        }
        Ok(())
    }

    /// Parses a `key = value` workload document. The `image` key, if present,
    /// is returned for the caller to load; otherwise a circle of `size` is used.
    pub fn parse(text: &str) -> Result<(Workload, Option<String>), Error> {
        let mut w = Workload {
            image: gen_circle_image(21)?,
            noise_fraction: 0.1,
            replicas: 50,
            drives: vec![1.0],
            rhos: vec![10.0],
            targets: vec![5.5, 4.5, 3.5],
            seed: 1,
            max_t: 500e-12,
            run_to_max_t: false,
        };
        let mut image_path = None;
        let err = |line: usize, m: String| Error::Workload(format!("line {line}: {m}"));
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) =
                content.split_once('=').ok_or_else(|| err(line, format!("expected `key = value`, got `{content}`")))?;
            let value = value.trim();
            let num = |v: &str| v.trim().parse::<f64>().map_err(|_| err(line, format!("bad number `{v}`")));
            let list = |v: &str| v.split(',').map(num).collect::<Result<Vec<f64>, Error>>();
            let int = |v: &str| v.parse::<u64>().map_err(|_| err(line, format!("bad integer `{v}`")));
            match key.trim() {
                "size" => w.image = gen_circle_image(int(value)? as usize)?,
                "image" => image_path = Some(value.to_string()),
                "noise" => w.noise_fraction = num(value)?,
                "replicas" => w.replicas = int(value)? as usize,
                "drives" => w.drives = list(value)?,
                "rhos" => w.rhos = list(value)?,
                "targets" => w.targets = list(value)?,
                "seed" => w.seed = int(value)?,
                "max_t_ps" => w.max_t = num(value)? * 1e-12,
                "run_to_max_t" => {
                    w.run_to_max_t = value.parse().map_err(|_| err(line, format!("bad bool `{value}`")))?
                }
                other => return Err(err(line, format!("unknown key `{other}`"))),
            }
        }
        Ok((w, image_path))
    }
}

/// Energy and delay at the first sample meeting a target.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyDelay {
    /// Network energy divided by neuron count [J].
    pub energy_per_cell: f64,
    /// [s]
    pub delay: f64,
    /// [J·s]
    pub edp: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Timeout;

/// Delay is the first sample at or below the target, so crossings between
/// samples are reported late.
pub fn energy_delay(trace: &Trace, target_e: f64) -> Result<EnergyDelay, Timeout> {
    let idx = trace.error.iter().position(|&e| e <= target_e).ok_or(Timeout)?;
    let delay = trace.times[idx];
    let energy_per_cell = trace.energy[idx] / trace.neurons.max(1) as f64;
    Ok(EnergyDelay { energy_per_cell, delay, edp: energy_per_cell * delay })
}

/// Outcome of one replica.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicaResult {
    /// One entry per workload target.
    pub hits: Vec<Option<EnergyDelay>>,
    /// Error at the last simulated instant [%].
    pub final_error: f64,
    pub initial_error: f64,
}

/// Runs one replica: noise pattern, initial angles and thermal noise all
/// derive from `seed`.
pub fn run_replica(image: &Image, noise: f64, p: &ParamSet, targets: &[f64], max_t: f64, run_to_max_t: bool, seed: u64) -> Result<ReplicaResult, Error> {
    let net = build_grid(image.rows(), image.cols(), None, *p)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noisy = apply_noise(image, noise, &mut rng);
    let mut state = init_state(&noisy, &net, &mut rng)?;
    let mut sim = Simulator::new(&net, derive_seed(seed, u64::MAX));
    let lowest = targets.iter().copied().fold(f64::INFINITY, f64::min);
    let stop = StopRule { target_e: (!run_to_max_t).then_some(lowest), max_t };
    let opts = RunOptions { stop, sample_every: 1, record_nodes: false };
    let (trace, _) = run_until(&mut sim, &mut state, image, opts)?;
    Ok(ReplicaResult {
        hits: targets.iter().map(|&t| energy_delay(&trace, t).ok()).collect(),
        final_error: *trace.error.last().expect("trace has at least one sample"),
        initial_error: trace.error[0],
    })
}

/// Mean and sample standard deviation, independent of input order: values
/// are sorted, then summed with Neumaier compensation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    let mean = neumaier(v.iter().copied()) / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = neumaier(v.iter().map(|x| (x - mean) * (x - mean))) / (n - 1.0);
    (mean, var.sqrt())
}

fn neumaier(values: impl Iterator<Item = f64>) -> f64 {
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    for x in values {
        let t = sum + x;
        comp += if sum.abs() >= x.abs() { (sum - t) + x } else { (x - t) + sum };
        sum = t;
    }
    sum + comp
}

#[derive(Debug, Clone, PartialEq)]
pub struct TargetStats {
    pub target: f64,
    pub delay_mean: f64,
    pub delay_std: f64,
    pub energy_mean: f64,
    pub energy_std: f64,
    /// energy_mean × delay_mean [J·s].
    pub edp: f64,
    pub timeout_fraction: f64,
}

/// Aggregate over the replicas of one (drive, rho) cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CellStats {
    pub drive: f64,
    pub rho: f64,
    pub replicas: usize,
    /// Replicas that stopped on a non-finite state.
    pub failures: usize,
    pub final_error_mean: f64,
    pub final_error_std: f64,
    pub targets: Vec<TargetStats>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct MCStats {
    pub cells: Vec<CellStats>,
}

impl MCStats {
    pub fn cell(&self, drive: f64, rho: f64) -> Option<&CellStats> {
        self.cells.iter().find(|c| c.drive == drive && c.rho == rho)
    }
}

pub fn aggregate(drive: f64, rho: f64, targets: &[f64], results: &[Result<ReplicaResult, Error>]) -> CellStats {
    let ok: Vec<&ReplicaResult> = results.iter().filter_map(|r| r.as_ref().ok()).collect();
    let finals: Vec<f64> = ok.iter().map(|r| r.final_error).collect();
    let (final_error_mean, final_error_std) = mean_std(&finals);
    let targets = targets
        .iter()
        .enumerate()
        .map(|(k, &target)| {
            let hits: Vec<EnergyDelay> = ok.iter().filter_map(|r| r.hits[k]).collect();
            let delays: Vec<f64> = hits.iter().map(|h| h.delay).collect();
            let energies: Vec<f64> = hits.iter().map(|h| h.energy_per_cell).collect();
            let (delay_mean, delay_std) = mean_std(&delays);
            let (energy_mean, energy_std) = mean_std(&energies);
            TargetStats {
                target,
                delay_mean,
                delay_std,
                energy_mean,
                energy_std,
                edp: energy_mean * delay_mean,
                timeout_fraction: 1.0 - hits.len() as f64 / results.len().max(1) as f64,
            }
        })
        .collect();
    CellStats {
        drive,
        rho,
        replicas: results.len(),
        failures: results.len() - ok.len(),
        final_error_mean,
        final_error_std,
        targets,
    }
}

/// Runs `replicas` simulations for every (drive, rho) pair. Replica `r` uses
/// the same seed in every cell, so cells differ only in their parameters.
/// Replicas run on the current rayon pool; results do not depend on the
/// number of threads.
pub fn monte_carlo(w: &Workload, p: &ParamSet) -> Result<MCStats, Error> {
    w.validate()?;
    let mut cells = Vec::with_capacity(w.drives.len() * w.rhos.len());
    for &rho in &w.rhos {
        for &drive in &w.drives {
            let cell_params = ParamSet { v_drive: drive, rho_ir: rho, ..*p };
            let violations = cell_params.validate();
            if !violations.is_empty() {
                return Err(Error::Params(crate::params::ParamError::Invalid(violations)));
            }
            let results: Vec<Result<ReplicaResult, Error>> = (0..w.replicas)
                .into_par_iter()
                .map(|r| {
                    let seed = derive_seed(w.seed, r as u64);
                    run_replica(&w.image, w.noise_fraction, &cell_params, &w.targets, w.max_t, w.run_to_max_t, seed)
                })
                .collect();
            if let Some(Err(e)) = results.iter().find(|r| !matches!(r, Ok(_) | Err(Error::Numerical(_)))) {
                return Err(Error::Workload(e.to_string()));
            }
            cells.push(aggregate(drive, rho, &w.targets, &results));
        }
    }
    Ok(MCStats { cells })
}

/// One row of the sweep table.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub drive: f64,
    pub rho: f64,
    pub target: f64,
    pub delay: f64,
    pub delay_std: f64,
    pub energy: f64,
    pub energy_std: f64,
    pub edp: f64,
    pub timeout_fraction: f64,
    pub final_error: f64,
    pub failures: usize,
}

/// Flattens stats into rows sorted by (rho, target, drive).
pub fn sweep_report(stats: &MCStats) -> Vec<SweepRow> {
    let mut rows: Vec<SweepRow> = stats
        .cells
        .iter()
        .flat_map(|c| {
            c.targets.iter().map(move |t| SweepRow {
                drive: c.drive,
                rho: c.rho,
                target: t.target,
                delay: t.delay_mean,
                delay_std: t.delay_std,
                energy: t.energy_mean,
                energy_std: t.energy_std,
                edp: t.edp,
                timeout_fraction: t.timeout_fraction,
                final_error: c.final_error_mean,
                failures: c.failures,
            })
        })
        .collect();
    rows.sort_by(|a, b| {
        a.rho.total_cmp(&b.rho).then(a.target.total_cmp(&b.target)).then(a.drive.total_cmp(&b.drive))
    });
    rows
}

pub use network::error_metric;
