//! Independent oracles shared by the property tests and the acceptance run.
//! Every check returns a short measurement on success and a reason on failure.

#![allow(dead_code)]

use std::path::Path;
use std::process::Command;

use irmen::integrator::Rk4;
use irmen::magnet::{self, Vec3};
use irmen::network::{NeuronState, STRIDE};
use irmen::{build_grid, error_metric, Image, NetworkState, ParamSet, Simulator};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use statrs::distribution::{ChiSquared, ContinuousCDF};

pub type Check = Result<String, String>;

pub const K_B: f64 = 1.380649e-16;

pub fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_irmen")
}

pub fn run_cli(args: &[&str], env: &[(&str, &str)]) -> std::process::Output {
    let mut cmd = Command::new(bin());
    cmd.args(args).env_remove("IRMEN_SEED");
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().expect("irmen binary runs")
}

/// Damped rotation y' = A·y with A = [[-a, -w], [w, -a]]; exact solution is
/// e^{-at}·R(wt)·y0.
pub fn rk4_global_order() -> Check {
    let (a, w) = (0.5, 2.0);
    let err = |n: usize| {
        let sys = move |_t: f64, y: &[f64], d: &mut [f64]| {
            d[0] = -a * y[0] - w * y[1];
            d[1] = w * y[0] - a * y[1];
        };
        let mut rk = Rk4::new(2);
        let mut y = [1.0, 0.0];
        let h = 2.0 / n as f64;
        for i in 0..n {
            rk.step(&sys, i as f64 * h, h, &mut y);
        }
        let decay = (-a * 2.0f64).exp();
        let exact = [decay * (w * 2.0).cos(), decay * (w * 2.0).sin()];
        ((y[0] - exact[0]).powi(2) + (y[1] - exact[1]).powi(2)).sqrt()
    };
    let errs: Vec<f64> = [20, 40, 80, 160].iter().map(|&n| err(n)).collect();
    let orders: Vec<f64> = errs.windows(2).map(|e| (e[0] / e[1]).log2()).collect();
    let min = orders.iter().copied().fold(f64::INFINITY, f64::min);
    if min >= 3.8 {
        Ok(format!("min observed order {min:.3}"))
    } else {
        Err(format!("observed orders {orders:?}"))
    }
}

/// Largest ||m| − 1| over `steps` full steps of a thermally agitated neuron.
pub fn norm_drift(steps: usize) -> Check {
    let p = ParamSet::default();
    let net = build_grid(1, 1, None, p).map_err(|e| e.to_string())?;
    let mut state = NetworkState::from_neurons(&[NeuronState {
        m: magnet::renormalize(Vec3::new(0.3, 0.9, 0.1)).unwrap(),
        p: 0.0,
        v: 0.0,
        y: 0.0,
    }]);
    let mut sim = Simulator::new(&net, 17);
    let mut worst: f64 = 0.0;
    for _ in 0..steps {
        sim.step(&mut state).map_err(|e| e.to_string())?;
        let m = state.neuron(0).m;
        worst = worst.max((m.norm() - 1.0).abs());
    }
    if worst < 1e-9 {
        Ok(format!("max ||m|-1| = {worst:.2e} over {steps} steps"))
    } else {
        Err(format!("max ||m|-1| = {worst:.2e}"))
    }
}

/// At T = 0 under a fixed field the projection m·Ĥ never decreases.
pub fn damping_monotone() -> Check {
    let p = ParamSet { temperature: 0.0, alpha: 0.05, ..Default::default() };
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for trial in 0..20 {
        let rand_unit = |rng: &mut ChaCha8Rng| {
            magnet::renormalize(Vec3::new(rng.sample(StandardNormal), rng.sample(StandardNormal), rng.sample(StandardNormal)))
                .unwrap()
        };
        let h_dir = rand_unit(&mut rng);
        let h = 5000.0 * h_dir;
        let mut m = rand_unit(&mut rng);
        let sys = |_t: f64, y: &[f64], d: &mut [f64]| {
            let dm = magnet::llg_rhs(Vec3::new(y[0], y[1], y[2]), h, &p);
            d.copy_from_slice(&[dm.x, dm.y, dm.z]);
        };
        let mut rk = Rk4::new(3);
        let step = 0.2 / (p.gamma * 5000.0);
        let mut last = m.dot(h_dir);
        for k in 0..20_000 {
            let mut y = [m.x, m.y, m.z];
            rk.step(&sys, 0.0, step, &mut y);
            m = magnet::renormalize(Vec3::new(y[0], y[1], y[2])).unwrap();
            let proj = m.dot(h_dir);
            if proj < last - 1e-12 {
                return Err(format!("trial {trial}, step {k}: m·H dropped from {last} to {proj}"));
            }
            last = proj;
        }
        if last < 0.999 {
            return Err(format!("trial {trial}: m·H only reached {last}"));
        }
    }
    Ok("m·Ĥ nondecreasing in 20 trials".into())
}

/// Sample mean and variance of each thermal-field component against the
/// fluctuation-dissipation variance 2kTα/(γ M_s V dt), within 3σ.
pub fn thermal_statistics(draws: usize) -> Check {
    let p = ParamSet::default();
    let volume = 16e-7 * 16e-7 * 6e-7;
    let sigma = (2.0 * K_B * 300.0 * p.alpha / (p.gamma * p.m_s * volume * p.dt)).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut sum = [0.0f64; 3];
    let mut sq = [0.0f64; 3];
    for _ in 0..draws {
        let h = magnet::thermal_field(&mut rng, &p, p.dt);
        for (k, v) in [h.x, h.y, h.z].into_iter().enumerate() {
            sum[k] += v;
            sq[k] += v * v;
        }
    }
    let n = draws as f64;
    let mut report = Vec::new();
    for k in 0..3 {
        let mean = sum[k] / n;
        let var = (sq[k] - n * mean * mean) / (n - 1.0);
        let mean_bound = 3.0 * sigma / n.sqrt();
        let var_bound = 3.0 * sigma * sigma * (2.0 / (n - 1.0)).sqrt();
        if mean.abs() > mean_bound || (var - sigma * sigma).abs() > var_bound {
            return Err(format!("component {k}: mean {mean:.3}, var {var:.1} vs σ² {:.1}", sigma * sigma));
        }
        report.push(format!("{:.4}", var.sqrt() / sigma));
    }
    Ok(format!("σ = {sigma:.2} Oe; sample σ ratios {}", report.join(", ")))
}

/// Reduced energy E/kT of a unit magnetization, built from the anisotropy
/// and demagnetizing fields: E = −(M_s V / 2)·m·(H_K + H_D).
fn reduced_energy(m: Vec3, p: &ParamSet, volume: f64) -> f64 {
    let h = magnet::anisotropy_field(m, p) + magnet::demag_field(m, p);
    -0.5 * p.m_s * volume * m.dot(h) / (K_B * p.temperature)
}

/// Two-sample chi-square on m_y histograms: long stochastic-LLG run of one
/// undriven magnet against a Metropolis sampler of exp(−E/kT).
pub fn boltzmann_equilibrium(samples: usize, seed: u64) -> Check {
    let base = ParamSet::default();
    let volume = 16e-7 * 16e-7 * 6e-7;
    // shallow well so the run crosses the barrier many times
    let temperature = base.k_anis * volume / (1.5 * K_B);
    let p = ParamSet { temperature, alpha: 0.1, v_drive: 0.0, ..base };
    let bins = 20;
    let bin_of = |y: f64| (((y + 1.0) / 2.0 * bins as f64) as usize).min(bins - 1);

    let net = build_grid(1, 1, None, p).map_err(|e| e.to_string())?;
    let mut state = NetworkState::from_neurons(&[NeuronState { m: Vec3::Y, p: 0.0, v: 0.0, y: 0.0 }]);
    // no drive: the gate node stays at zero, only precession limits the substep
    let mut sim = Simulator::with_substeps(&net, seed, 2);
    let spacing = 2000; // 1 ns between samples
    let mut llg = vec![0usize; bins];
    for _ in 0..200 {
        sim.step(&mut state).map_err(|e| e.to_string())?;
    }
    for _ in 0..samples {
        for _ in 0..spacing {
            sim.step(&mut state).map_err(|e| e.to_string())?;
        }
        llg[bin_of(state.neuron(0).m.y)] += 1;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabcdef);
    let mut m = Vec3::Y;
    let mut e = reduced_energy(m, &p, volume);
    let mut mc = vec![0usize; bins];
    let mc_samples = 20 * samples;
    for k in 0..mc_samples * 20 {
        let kick = Vec3::new(rng.sample(StandardNormal), rng.sample(StandardNormal), rng.sample(StandardNormal));
        let trial = magnet::renormalize(m + 0.5 * kick).unwrap();
        let e_trial = reduced_energy(trial, &p, volume);
        if rng.random::<f64>() < (e - e_trial).exp() {
            m = trial;
            e = e_trial;
        }
        if k % 20 == 19 {
            mc[bin_of(m.y)] += 1;
        }
    }

    let (a, b) = (samples as f64, mc_samples as f64);
    let mut chi2 = 0.0;
    let mut dof = 0usize;
    for i in 0..bins {
        let (x, y) = (llg[i] as f64, mc[i] as f64);
        if x + y > 0.0 {
            chi2 += (x * (b / a).sqrt() - y * (a / b).sqrt()).powi(2) / (x + y);
            dof += 1;
        }
    }
    let dist = ChiSquared::new((dof - 1) as f64).unwrap();
    let p_value = 1.0 - dist.cdf(chi2);
    if p_value > 0.01 {
        Ok(format!("chi2 = {chi2:.1} on {} dof, p = {p_value:.3}", dof - 1))
    } else {
        Err(format!("chi2 = {chi2:.1} on {} dof, p = {p_value:.2e}; llg {llg:?} mc {mc:?}", dof - 1))
    }
}

/// Bisection on V for dV/dt = 0, compared with clamp(0.65·mean(Y)).
pub fn synapse_fixed_point(draws: usize) -> Check {
    let p = ParamSet::default();
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let mut worst: f64 = 0.0;
    for _ in 0..draws {
        let n = rng.random_range(1..=5);
        let ys: Vec<f64> = (0..n).map(|_| rng.random_range(-1.5..1.5)).collect();
        let ws = vec![1.0; n];
        let f = |v: f64| irmen::circuit::synapse_drive(&ys, &ws, v, &p).unwrap();
        let (mut lo, mut hi) = (-3.0, 3.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let root = 0.5 * (lo + hi);
        let expected = (0.65 * ys.iter().sum::<f64>() / n as f64).clamp(-p.v_dd, p.v_dd);
        worst = worst.max((root - expected).abs());
    }
    if worst < 1e-9 {
        Ok(format!("max |V* - clamp(0.65·mean Y)| = {worst:.1e}"))
    } else {
        Err(format!("max deviation {worst:.3e}"))
    }
}

/// Ideal CNN with the self + von Neumann template and a step output; a zero
/// input sum holds the current value.
pub fn ideal_fixed_point(rows: usize, cols: usize, x: &[i8]) -> bool {
    (0..rows * cols).all(|i| {
        let (r, c) = (i / cols, i % cols);
        let mut s = x[i] as i32;
        if r > 0 {
            s += x[i - cols] as i32;
        }
        if r + 1 < rows {
            s += x[i + cols] as i32;
        }
        if c > 0 {
            s += x[i - 1] as i32;
        }
        if c + 1 < cols {
            s += x[i + 1] as i32;
        }
        s * x[i] as i32 >= 0
    })
}

/// Starts the device at a binary pattern with every node at its
/// self-consistent value and the magnets slightly tilted, runs it at T = 0
/// and reports whether the sign pattern survives.
pub fn device_holds(pattern: &Image, p: &ParamSet, duration: f64) -> Result<bool, String> {
    let net = build_grid(pattern.rows(), pattern.cols(), None, *p).map_err(|e| e.to_string())?;
    let i_d = irmen::circuit::drive_current(p);
    let ys: Vec<f64> = pattern
        .pixels()
        .iter()
        .map(|&px| irmen::circuit::ir_voltage(i_d, irmen::circuit::ir_resistance(px as f64, p)))
        .collect();
    let neurons: Vec<NeuronState> = (0..pattern.len())
        .map(|i| {
            let nb = net.neighborhood(i);
            let sum: f64 = nb.iter().map(|&j| ys[j]).sum();
            let v = irmen::circuit::synapse_target(sum, nb.len(), p);
            let tilt = 0.05;
            let s = pattern.pixels()[i] as f64;
            NeuronState {
                m: Vec3::new(tilt * (0.7 + 0.1 * i as f64).cos(), s * (1.0 - tilt * tilt).sqrt(), tilt * (0.7 + 0.1 * i as f64).sin()),
                p: p.c_me * v,
                v,
                y: ys[i],
            }
        })
        .collect();
    let mut state = NetworkState::from_neurons(&neurons);
    let mut sim = Simulator::new(&net, 0);
    let steps = (duration / p.dt).round() as usize;
    for _ in 0..steps {
        sim.step(&mut state).map_err(|e| e.to_string())?;
    }
    Ok(state.to_image(pattern.rows(), pattern.cols()).map_err(|e| e.to_string())? == *pattern)
}

/// Every 3×3 pattern the cold device holds must be an ideal fixed point.
pub fn fixed_points_3x3() -> Check {
    let p = ParamSet { temperature: 0.0, ..Default::default() };
    let mut device = 0;
    let mut ideal = 0;
    for code in 0u32..512 {
        let px: Vec<i8> = (0..9).map(|b| if code >> b & 1 == 1 { 1 } else { -1 }).collect();
        let is_ideal = ideal_fixed_point(3, 3, &px);
        ideal += is_ideal as usize;
        let img = Image::new(3, 3, px).unwrap();
        if device_holds(&img, &p, 300e-12)? {
            device += 1;
            if !is_ideal {
                return Err(format!("device holds non-fixed pattern {code:09b}"));
            }
        }
    }
    if device < 2 {
        return Err(format!("only {device} device fixed points"));
    }
    Ok(format!("{device} device fixed points, all among {ideal} ideal ones"))
}

/// E for clean, inverted and 10%-inverted states with m_y exactly ±1.
pub fn error_endpoints() -> Check {
    let img = Image::new(10, 10, (0..100).map(|i| if (i * 7) % 3 == 0 { 1 } else { -1 }).collect()).unwrap();
    let state_of = |signs: Vec<f64>| {
        NetworkState::from_neurons(
            &signs.iter().map(|&s| NeuronState { m: s * Vec3::Y, p: 0.0, v: 0.0, y: 0.0 }).collect::<Vec<_>>(),
        )
    };
    let px: Vec<f64> = img.pixels().iter().map(|&v| v as f64).collect();
    let clean = error_metric(&state_of(px.clone()), &img).unwrap();
    let inverted = error_metric(&state_of(px.iter().map(|v| -v).collect()), &img).unwrap();
    let tenth = error_metric(
        &state_of(px.iter().enumerate().map(|(i, v)| if i % 10 == 3 { -v } else { *v }).collect()),
        &img,
    )
    .unwrap();
    let got = [clean, inverted, tenth];
    if got.iter().zip([0.0, 200.0, 20.0]).all(|(g, w)| (g - w).abs() < 1e-12) {
        Ok(format!("{got:?}"))
    } else {
        Err(format!("got {got:?}"))
    }
}

fn read(path: &Path) -> Result<Vec<u8>, String> {
    std::fs::read(path).map_err(|e| format!("{}: {e}", path.display()))
}

/// Same seed twice gives identical simulate traces; a sweep and a large-grid
/// simulate are identical with one and eight worker threads.
pub fn cli_determinism() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let d = |name: &str| dir.path().join(name);
    let s = |p: &std::path::PathBuf| p.to_str().unwrap().to_string();

    for name in ["a", "b"] {
        let out = run_cli(&["simulate", "--seed", "9", "--max-t", "40", "--nodes", "--out", &s(&d(name))], &[]);
        if !out.status.success() {
            return Err(String::from_utf8_lossy(&out.stderr).into());
        }
    }
    for f in ["trace.csv", "nodes.csv", "summary.csv"] {
        if read(&d("a").join(f))? != read(&d("b").join(f))? {
            return Err(format!("{f} differs between identical runs"));
        }
    }

    let big = Image::filled(64, 64, -1).unwrap();
    std::fs::write(d("big.txt"), big.to_text()).map_err(|e| e.to_string())?;
    let workload = d("w.conf");
    std::fs::write(&workload, "size = 9\nreplicas = 3\ndrives = 0.5, 1.0\nrhos = 10\nmax_t_ps = 30\nrun_to_max_t = true\n")
        .map_err(|e| e.to_string())?;
    for jobs in ["1", "8"] {
        let out = run_cli(&["sweep", "--workload", &s(&workload), "--jobs", jobs, "--out", &s(&d(&format!("s{jobs}")))], &[]);
        if !out.status.success() {
            return Err(String::from_utf8_lossy(&out.stderr).into());
        }
        let out = run_cli(
            &["simulate", "--image", &s(&d("big.txt")), "--max-t", "5", "--jobs", jobs, "--out", &s(&d(&format!("g{jobs}")))],
            &[],
        );
        if !out.status.success() {
            return Err(String::from_utf8_lossy(&out.stderr).into());
        }
    }
    if read(&d("s1").join("sweep.csv"))? != read(&d("s8").join("sweep.csv"))? {
        return Err("sweep.csv differs between --jobs 1 and --jobs 8".into());
    }
    if read(&d("g1").join("trace.csv"))? != read(&d("g8").join("trace.csv"))? {
        return Err("64x64 trace differs between --jobs 1 and --jobs 8".into());
    }
    Ok("repeat runs and --jobs 1/8 byte-identical".into())
}

/// Flat index of the value slot `k` of neuron `i`.
pub fn slot(i: usize, k: usize) -> usize {
    i * STRIDE + k
}
