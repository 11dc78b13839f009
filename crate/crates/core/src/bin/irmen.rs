use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use irmen::experiments::{self, derive_seed, energy_delay, gen_circle_image, sweep_report, Workload};
use irmen::network::{RunOptions, StopRule};
use irmen::params::ParamError;
use irmen::{build_grid, derive_quantities, init_state, load_params, run_until, Error, Image, ParamSet, Simulator};

#[derive(Parser)]
#[command(name = "irmen", version, about = "Magnetoelectric spin-orbit CNN simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Parameter file (`key = value`); defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Master seed; IRMEN_SEED overrides it.
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

#[derive(Subcommand)]
enum Command {
    /// Print derived device quantities.
    Report {
        #[command(flatten)]
        common: Common,
    },
    /// Filter one noisy image and write its time trace.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Clean target image; a 21x21 circle when omitted.
        #[arg(long)]
        image: Option<PathBuf>,
        /// Fraction of pixels flipped before the run.
        #[arg(long, default_value_t = 0.1)]
        noise: f64,
        /// Simulated time [ps].
        #[arg(long = "max-t", default_value_t = 500.0)]
        max_t: f64,
        /// Error targets [%], comma separated.
        #[arg(long, value_delimiter = ',', default_values_t = vec![5.5, 4.5, 3.5])]
        targets: Vec<f64>,
        /// Trace sampling interval in dt steps.
        #[arg(long, default_value_t = 1)]
        sample_every: usize,
        /// Also write m_y of every neuron to nodes.csv.
        #[arg(long)]
        nodes: bool,
    },
    /// Monte Carlo sweep over drive and resistivity.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Workload file (`key = value`).
        #[arg(long)]
        workload: PathBuf,
        /// Overrides the workload's time limit [ps].
        #[arg(long = "max-t")]
        max_t: Option<f64>,
        /// Overrides the workload's targets [%].
        #[arg(long, value_delimiter = ',')]
        targets: Option<Vec<f64>>,
    },
}

enum Failure {
    Config(String),
    Io(String),
    Numerical(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 2,
            Failure::Io(_) => 3,
            Failure::Numerical(_) => 4,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Numerical(m) => Failure::Numerical(m),
            Error::Params(ParamError::Invalid(v)) => Failure::Config(
                v.iter().map(|x| format!("{}: {}", x.field, x.message)).collect::<Vec<_>>().join("\n"),
            ),
            other => Failure::Config(other.to_string()),
        }
    }
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> Failure {
    Failure::Io(format!("{}: {e}", path.display()))
}

#[derive(Serialize)]
struct RunManifest {
    config: Option<String>,
    command: String,
    args: Vec<String>,
    seed: u64,
    out: String,
    version: &'static str,
    timestamp_unix: u64,
}

fn write_manifest(out: &Path, common: &Common, command: &str, seed: u64) -> Result<(), Failure> {
    let manifest = RunManifest {
        config: common.config.as_ref().map(|p| p.display().to_string()),
        command: command.to_string(),
        args: std::env::args().collect(),
        seed,
        out: out.display().to_string(),
        version: env!("CARGO_PKG_VERSION"),
        timestamp_unix: SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0),
    };
    let json = serde_json::to_string_pretty(&manifest).map_err(|e| Failure::Io(e.to_string()))?;
    let path = out.join("manifest.json");
    fs::write(&path, json + "\n").map_err(|e| io_err(&path, e))
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| io_err(path, e))
}

fn load_config(common: &Common) -> Result<ParamSet, Failure> {
    match &common.config {
        None => Ok(ParamSet::default()),
        Some(path) => Ok(load_params(&read(path)?).map_err(Error::from)?),
    }
}

fn effective_seed(common: &Common) -> Result<u64, Failure> {
    match std::env::var("IRMEN_SEED") {
        Ok(s) => s.trim().parse().map_err(|_| Failure::Config(format!("IRMEN_SEED `{s}` is not an integer"))),
        Err(_) => Ok(common.seed),
    }
}

fn prepare_out(out: &Path, params: &ParamSet) -> Result<(), Failure> {
    fs::create_dir_all(out).map_err(|e| io_err(out, e))?;
    let path = out.join("params.conf");
    fs::write(&path, params.to_config()).map_err(|e| io_err(&path, e))
}

fn num(x: f64) -> String {
    format!("{x:.8e}")
}

/// Nine significant digits, positional notation when the magnitude allows.
fn readable(x: f64) -> String {
    let mag = x.abs();
    if !(1e-3..1e9).contains(&mag) {
        return num(x);
    }
    let decimals = (8 - mag.log10().floor() as i32).max(0) as usize;
    let s = format!("{x:.decimals$}");
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>, Failure> {
    csv::Writer::from_path(path).map_err(|e| io_err(path, e))
}

fn cmd_report(common: &Common) -> Result<(), Failure> {
    let params = load_config(common)?;
    let text: String = derive_quantities(&params)
        .to_lines()
        .into_iter()
        .map(|(k, v)| format!("{k} = {}\n", readable(v)))
        .collect();
    print!("{text}");
    if let Some(out) = &common.out {
        prepare_out(out, &params)?;
        let path = out.join("report.txt");
        fs::write(&path, &text).map_err(|e| io_err(&path, e))?;
        write_manifest(out, common, "report", effective_seed(common)?)?;
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_simulate(
    common: &Common,
    image: Option<&Path>,
    noise: f64,
    max_t_ps: f64,
    targets: &[f64],
    sample_every: usize,
    nodes: bool,
) -> Result<(), Failure> {
    let params = load_config(common)?;
    let seed = effective_seed(common)?;
    if !(0.0..1.0).contains(&noise) {
        return Err(Failure::Config(format!("noise {noise} outside [0, 1)")));
    }
    if !(max_t_ps >= 0.0) {
        return Err(Failure::Config(format!("max-t {max_t_ps} must be >= 0")));
    }
    let clean = match image {
        Some(path) => Image::parse(&read(path)?)?,
        None => gen_circle_image(21)?,
    };
    let out = common.out.clone().unwrap_or_else(|| PathBuf::from("."));
    prepare_out(&out, &params)?;

    let net = build_grid(clean.rows(), clean.cols(), None, params)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noisy = experiments::apply_noise(&clean, noise, &mut rng);
    let mut state = init_state(&noisy, &net, &mut rng)?;
    let mut sim = Simulator::new(&net, derive_seed(seed, u64::MAX));
    let opts = RunOptions {
        stop: StopRule { target_e: None, max_t: max_t_ps * 1e-12 },
        sample_every,
        record_nodes: nodes,
    };
    let (trace, _) = run_until(&mut sim, &mut state, &clean, opts)?;

    let path = out.join("trace.csv");
    let mut w = csv_writer(&path)?;
    let wr = |w: &mut csv::Writer<fs::File>, rec: Vec<String>| w.write_record(rec).map_err(|e| io_err(&path, e));
    wr(&mut w, ["t_ps", "E_pct", "energy_fJ_total", "p_drive_uW", "p_leak_uW", "p_charge_uW"].map(String::from).to_vec())?;
    for i in 0..trace.len() {
        let p = trace.power[i];
        wr(
            &mut w,
            vec![
                num(trace.times[i] * 1e12),
                num(trace.error[i]),
                num(trace.energy[i] * 1e15),
                num(p.p_drive * 1e6),
                num(p.p_leak * 1e6),
                num(p.p_charge * 1e6),
            ],
        )?;
    }
    w.flush().map_err(|e| io_err(&path, e))?;

    if let Some(samples) = &trace.nodes {
        let path = out.join("nodes.csv");
        let mut w = csv_writer(&path)?;
        let mut header = vec!["t_ps".to_string()];
        header.extend((0..net.len()).map(|i| format!("m_y_{i}")));
        w.write_record(&header).map_err(|e| io_err(&path, e))?;
        for (t, row) in trace.times.iter().zip(samples) {
            let mut rec = vec![num(t * 1e12)];
            rec.extend(row.iter().map(|&m| num(m)));
            w.write_record(&rec).map_err(|e| io_err(&path, e))?;
        }
        w.flush().map_err(|e| io_err(&path, e))?;
    }

    let path = out.join("summary.csv");
    let mut w = csv_writer(&path)?;
    w.write_record(["target_pct", "reached", "delay_ps", "energy_fJ_per_cell", "edp_Js"]).map_err(|e| io_err(&path, e))?;
    for &t in targets {
        let rec = match energy_delay(&trace, t) {
            Ok(h) => vec![num(t), "1".into(), num(h.delay * 1e12), num(h.energy_per_cell * 1e15), num(h.edp)],
            Err(_) => vec![num(t), "0".into(), String::new(), String::new(), String::new()],
        };
        w.write_record(&rec).map_err(|e| io_err(&path, e))?;
    }
    w.flush().map_err(|e| io_err(&path, e))?;

    let path = out.join("final_image.txt");
    fs::write(&path, state.to_image(clean.rows(), clean.cols())?.to_text()).map_err(|e| io_err(&path, e))?;
    let path = out.join("noisy_image.txt");
    fs::write(&path, noisy.to_text()).map_err(|e| io_err(&path, e))?;
    write_manifest(&out, common, "simulate", seed)?;
    eprintln!("final E = {:.3} %", trace.error.last().copied().unwrap_or(f64::NAN));
    Ok(())
}

fn cmd_sweep(common: &Common, workload: &Path, max_t_ps: Option<f64>, targets: Option<Vec<f64>>) -> Result<(), Failure> {
    let params = load_config(common)?;
    let seed = effective_seed(common)?;
    let (mut w, image_path) = Workload::parse(&read(workload)?)?;
    if let Some(rel) = image_path {
        let path = workload.parent().unwrap_or(Path::new(".")).join(rel);
        w.image = Image::parse(&read(&path)?)?;
    }
    if let Some(t) = max_t_ps {
        w.max_t = t * 1e-12;
    }
    if let Some(t) = targets {
        w.targets = t;
    }
    w.seed = seed;
    w.validate()?;
    let out = common.out.clone().unwrap_or_else(|| PathBuf::from("."));
    prepare_out(&out, &params)?;
    let path = out.join("workload.conf");
    fs::copy(workload, &path).map_err(|e| io_err(&path, e))?;

    let stats = experiments::monte_carlo(&w, &params)?;
    let path = out.join("sweep.csv");
    let mut csv = csv_writer(&path)?;
    csv.write_record([
        "drive_V",
        "rho_mOhm_cm",
        "target_pct",
        "delay_ps",
        "delay_std_ps",
        "energy_fJ_per_cell",
        "energy_std_fJ",
        "edp_Js",
        "timeout_frac",
        "final_E_pct",
        "failures",
    ])
    .map_err(|e| io_err(&path, e))?;
    for r in sweep_report(&stats) {
        csv.write_record([
            num(r.drive),
            num(r.rho),
            num(r.target),
            num(r.delay * 1e12),
            num(r.delay_std * 1e12),
            num(r.energy * 1e15),
            num(r.energy_std * 1e15),
            num(r.edp),
            num(r.timeout_fraction),
            num(r.final_error),
            r.failures.to_string(),
        ])
        .map_err(|e| io_err(&path, e))?;
    }
    csv.flush().map_err(|e| io_err(&path, e))?;
    write_manifest(&out, common, "sweep", seed)
}

fn run(cli: Cli) -> Result<(), Failure> {
    let common = match &cli.command {
        Command::Report { common } | Command::Simulate { common, .. } | Command::Sweep { common, .. } => common,
    };
    if common.jobs == 0 {
        return Err(Failure::Config("--jobs must be at least 1".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(common.jobs)
        .build()
        .map_err(|e| Failure::Config(e.to_string()))?;
    pool.install(|| match &cli.command {
        Command::Report { common } => cmd_report(common),
        Command::Simulate { common, image, noise, max_t, targets, sample_every, nodes } => {
            cmd_simulate(common, image.as_deref(), *noise, *max_t, targets, *sample_every, *nodes)
        }
        Command::Sweep { common, workload, max_t, targets } => cmd_sweep(common, workload, *max_t, targets.clone()),
    })
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let (Failure::Config(m) | Failure::Io(m) | Failure::Numerical(m)) = &f;
            eprintln!("error: {m}");
            ExitCode::from(f.code())
        }
    }
}
