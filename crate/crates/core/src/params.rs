//! Device and circuit parameters.
//!
//! Magnetic quantities are CGS (Oe, emu/cm³, erg/cm³); electrical quantities
//! are SI (V, A, F, Ω). Lengths are nanometres and the IR resistivity is in
//! mΩ·cm. Conversions between the two systems only happen in
//! [`crate::ferroelectric::me_field`], [`ParamSet::sigma_thermal`] and the
//! resistance helpers below.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

/// Boltzmann constant [erg/K].
pub const K_B: f64 = 1.380649e-16;

/// Néel-Arrhenius attempt period [s].
pub const TAU_0: f64 = 1e-9;

/// 1 nm³ in cm³.
pub const NM3_TO_CM3: f64 = 1e-21;

/// 1 mΩ·cm in Ω·nm.
pub const MOHM_CM_TO_OHM_NM: f64 = 1e4;

/// 1 J in erg.
pub const JOULE_TO_ERG: f64 = 1e7;

/// Keys whose defaults are calibration choices rather than tabulated values.
pub const CALIBRATED_KEYS: &[&str] = &[
    "alpha", "gamma", "T", "tau_FE", "t_IR", "w_IR", "C_Y", "R_V", "I_leak0", "R_drive_extra",
];

/// The full parameter set of one simulated network.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParamSet {
    /// Crystalline anisotropy energy density [erg/cm³].
    pub k_anis: f64,
    /// Ferromagnet volume [nm³].
    pub v_fm: f64,
    /// Magnet extent along x, y, z [nm].
    pub fm_dims: [f64; 3],
    /// Spin injection efficiency.
    pub eta: f64,
    /// Saturation magnetization [emu/cm³].
    pub m_s: f64,
    /// Magnetoelectric capacitance [F].
    pub c_me: f64,
    /// Interlayer coupling efficiency.
    pub zeta: f64,
    /// IR conversion length [nm].
    pub lambda_ir: f64,
    /// IR resistivity [mΩ·cm].
    pub rho_ir: f64,
    /// IR interface width along y [nm].
    pub w_ir: f64,
    /// IR stack thickness [nm].
    pub t_ir: f64,
    /// Gilbert damping.
    pub alpha: f64,
    /// Gyromagnetic ratio [rad/(s·Oe)].
    pub gamma: f64,
    /// Temperature [K].
    pub temperature: f64,
    /// Ferroelectric relaxation time [s].
    pub tau_fe: f64,
    /// Integration (trace) time step [s].
    pub dt: f64,
    /// Neuron drive voltage [V].
    pub v_drive: f64,
    /// Synapse rail magnitude [V].
    pub v_dd: f64,
    /// Series resistance of the drive path beyond the IR stack [Ω].
    pub r_drive_extra: f64,
    /// Net synapse gate capacitance [F].
    pub c_y: f64,
    /// Synapse charging resistance [Ω].
    pub r_v: f64,
    /// Synapse steady-state proportionality constant.
    pub k_sat: f64,
    /// Peak rail-to-rail short-circuit current per synapse [A].
    pub i_leak0: f64,
    /// Minimum feature size [nm].
    pub feature_size: f64,
}

impl Default for ParamSet {
    fn default() -> Self {
        Self {
            k_anis: 6e5,
            v_fm: 1536.0,
            fm_dims: [16.0, 16.0, 6.0],
            eta: 0.9,
            m_s: 500.0,
            c_me: 0.68e-15,
            zeta: 0.5,
            lambda_ir: 1.0,
            rho_ir: 10.0,
            w_ir: 16.0,
            t_ir: 4.0,
            alpha: 0.01,
            gamma: 1.76e7,
            temperature: 300.0,
            tau_fe: 7e-12,
            dt: 0.5e-12,
            v_drive: 1.0,
            v_dd: 0.5,
            r_drive_extra: 0.0,
            c_y: 0.1e-15,
            r_v: 10e3,
            k_sat: 0.65,
            i_leak0: 5e-6,
            feature_size: 16.0,
        }
    }
}

/// A single failed invariant.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub field: &'static str,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

#[derive(Debug, Error)]
pub enum ParamError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("invalid parameters: {}", join_violations(.0))]
    Invalid(Vec<Violation>),
}

fn join_violations(v: &[Violation]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; ")
}

/// Config keys in the order they are written by [`ParamSet::to_config`].
pub const KEYS: &[&str] = &[
    "K", "V_FM", "fm_dims", "eta", "M_s", "C_ME", "zeta", "lambda_IR", "rho_IR", "w_IR", "t_IR",
    "alpha", "gamma", "T", "tau_FE", "dt", "V_drive", "V_DD", "R_drive_extra", "C_Y", "R_V",
    "k_sat", "I_leak0", "F",
];

impl ParamSet {
    fn scalar_mut(&mut self, key: &str) -> Option<&mut f64> {
        Some(match key {
            "K" => &mut self.k_anis,
            "V_FM" => &mut self.v_fm,
            "eta" => &mut self.eta,
            "M_s" => &mut self.m_s,
            "C_ME" => &mut self.c_me,
            "zeta" => &mut self.zeta,
            "lambda_IR" => &mut self.lambda_ir,
            "rho_IR" => &mut self.rho_ir,
            "w_IR" => &mut self.w_ir,
            "t_IR" => &mut self.t_ir,
            "alpha" => &mut self.alpha,
            "gamma" => &mut self.gamma,
            "T" => &mut self.temperature,
            "tau_FE" => &mut self.tau_fe,
            "dt" => &mut self.dt,
            "V_drive" => &mut self.v_drive,
            "V_DD" => &mut self.v_dd,
            "R_drive_extra" => &mut self.r_drive_extra,
            "C_Y" => &mut self.c_y,
            "R_V" => &mut self.r_v,
            "k_sat" => &mut self.k_sat,
            "I_leak0" => &mut self.i_leak0,
            "F" => &mut self.feature_size,
            _ => return None,
        })
    }

    /// Sets one config key from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        if key == "fm_dims" {
            self.fm_dims = parse_dims(value)?;
            return Ok(());
        }
        let slot = self.scalar_mut(key).ok_or_else(|| format!("unknown key `{key}`"))?;
        *slot = parse_number(value)?;
        Ok(())
    }

    /// Serializes to the config format; `load_params` reads it back exactly.
    pub fn to_config(&self) -> String {
        let mut copy = *self;
        let mut out = String::new();
        for key in KEYS {
            if *key == "fm_dims" {
                let [l, w, t] = self.fm_dims;
                out.push_str(&format!("fm_dims = {l:e}, {w:e}, {t:e}\n"));
            } else {
                let v = *copy.scalar_mut(key).expect("known key");
                out.push_str(&format!("{key} = {v:e}\n"));
            }
        }
        out
    }

    /// Every violated invariant; empty when the set is usable.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let mut bad = |field: &'static str, message: String| out.push(Violation { field, message });

        let mut copy = *self;
        for key in KEYS.iter().filter(|k| **k != "fm_dims") {
            let v = *copy.scalar_mut(key).expect("known key");
            if !v.is_finite() {
                bad(static_key(key), format!("must be finite, got {v}"));
            }
        }

        let strictly_positive: [(&'static str, f64); 18] = [
            ("K", self.k_anis),
            ("V_FM", self.v_fm),
            ("M_s", self.m_s),
            ("C_ME", self.c_me),
            ("lambda_IR", self.lambda_ir),
            ("rho_IR", self.rho_ir),
            ("w_IR", self.w_ir),
            ("t_IR", self.t_ir),
            ("alpha", self.alpha),
            ("gamma", self.gamma),
            ("tau_FE", self.tau_fe),
            ("dt", self.dt),
            ("V_DD", self.v_dd),
            ("C_Y", self.c_y),
            ("R_V", self.r_v),
            ("F", self.feature_size),
            ("fm_dims", self.fm_dims.iter().copied().fold(f64::INFINITY, f64::min)),
            ("eta", self.eta),
        ];
        for (field, v) in strictly_positive {
            if v.is_finite() && v <= 0.0 {
                bad(field, format!("must be > 0, got {v}"));
            }
        }
        for (field, v) in [
            ("T", self.temperature),
            ("V_drive", self.v_drive),
            ("R_drive_extra", self.r_drive_extra),
            ("I_leak0", self.i_leak0),
        ] {
            if v < 0.0 {
                bad(field, format!("must be >= 0, got {v}"));
            }
        }
        for (field, v) in [("eta", self.eta), ("zeta", self.zeta), ("k_sat", self.k_sat)] {
            if !(v > 0.0 && v <= 1.0) {
                bad(field, format!("must lie in (0, 1], got {v}"));
            }
        }

        let box_volume: f64 = self.fm_dims.iter().product();
        if (box_volume - self.v_fm).abs() > 1e-3 * self.v_fm.abs() {
            bad(
                "fm_dims",
                format!("l*w*t = {box_volume} nm^3 differs from V_FM = {} nm^3 by more than 0.1%", self.v_fm),
            );
        }
        if self.dt > self.tau_fe / 5.0 {
            bad("dt", format!("dt <= tau_FE/5 violated: dt = {:e} s, tau_FE = {:e} s", self.dt, self.tau_fe));
        }
        out
    }

    /// Magnet volume [cm³].
    pub fn volume_cm3(&self) -> f64 {
        self.v_fm * NM3_TO_CM3
    }

    /// Anisotropy field magnitude 2K/M_s [Oe].
    pub fn h_k(&self) -> f64 {
        2.0 * self.k_anis / self.m_s
    }

    /// Thermal stability factor KV/(k_B T). Infinite at T = 0.
    pub fn delta_barrier(&self) -> f64 {
        self.k_anis * self.volume_cm3() / (K_B * self.temperature)
    }

    /// Per-component standard deviation of the thermal field for step `h` [Oe].
    pub fn sigma_thermal(&self, h: f64) -> f64 {
        (2.0 * K_B * self.temperature * self.alpha / (self.gamma * self.m_s * self.volume_cm3() * h)).sqrt()
    }

    /// IR stack resistance for current along x [Ω].
    pub fn r_ir_x(&self) -> f64 {
        self.rho_ir * MOHM_CM_TO_OHM_NM * self.fm_dims[0] / (self.w_ir * self.t_ir)
    }

    /// IR stack resistance for drive current along z [Ω].
    pub fn r_ir_z(&self) -> f64 {
        self.rho_ir * MOHM_CM_TO_OHM_NM * self.t_ir / (self.fm_dims[0] * self.w_ir)
    }
}

fn static_key(key: &str) -> &'static str {
    KEYS.iter().find(|k| **k == key).copied().unwrap_or("?")
}

fn parse_number(value: &str) -> Result<f64, String> {
    f64::from_str(value.trim()).map_err(|_| format!("expected a number, got `{}`", value.trim()))
}

fn parse_dims(value: &str) -> Result<[f64; 3], String> {
    let inner = value.trim().trim_start_matches('(').trim_end_matches(')');
    let parts: Vec<&str> = inner.split(',').collect();
    if parts.len() != 3 {
        return Err(format!("fm_dims expects three comma-separated lengths, got `{}`", value.trim()));
    }
    let mut dims = [0.0; 3];
    for (d, part) in dims.iter_mut().zip(parts) {
        *d = parse_number(part)?;
    }
    Ok(dims)
}

/// Parses a `key = value` document on top of the defaults and validates it.
pub fn load_params(config_text: &str) -> Result<ParamSet, ParamError> {
    let mut p = ParamSet::default();
    for (idx, raw) in config_text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content.split_once('=').ok_or_else(|| ParamError::Parse {
            line,
            message: format!("expected `key = value`, got `{content}`"),
        })?;
        let key = key.trim();
        if key != "fm_dims" && p.scalar_mut(key).is_none() {
            return Err(ParamError::UnknownKey { line, key: key.to_string() });
        }
        p.set(key, value).map_err(|message| ParamError::Parse { line, message })?;
    }
    let violations = p.validate();
    if violations.is_empty() {
        Ok(p)
    } else {
        Err(ParamError::Invalid(violations))
    }
}

/// Analytically derived device quantities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivedReport {
    pub h_k: f64,
    pub delta_barrier: f64,
    pub tau_n: f64,
    pub sigma_t: f64,
    pub r_ir_x: f64,
    pub r_ir_z: f64,
    pub r_x_at_my1: f64,
    pub i_d: f64,
    pub h_me_at_vdd: f64,
}

pub fn derive_quantities(p: &ParamSet) -> DerivedReport {
    let delta_barrier = p.delta_barrier();
    DerivedReport {
        h_k: p.h_k(),
        delta_barrier,
        tau_n: TAU_0 * delta_barrier.exp(),
        sigma_t: p.sigma_thermal(p.dt),
        r_ir_x: p.r_ir_x(),
        r_ir_z: p.r_ir_z(),
        r_x_at_my1: crate::circuit::ir_resistance(1.0, p),
        i_d: crate::circuit::drive_current(p),
        h_me_at_vdd: crate::ferroelectric::me_field(p.c_me * p.v_dd, p.v_dd, p).y,
    }
}

impl DerivedReport {
    /// `key = value` lines as printed by the `report` command.
    pub fn to_lines(&self) -> Vec<(&'static str, f64)> {
        vec![
            ("H_K_Oe", self.h_k),
            ("Delta_barrier", self.delta_barrier),
            ("tau_N_s", self.tau_n),
            ("sigma_T_Oe", self.sigma_t),
            ("R_IR_x_Ohm", self.r_ir_x),
            ("R_IR_z_Ohm", self.r_ir_z),
            ("R_X_at_my1_Ohm", self.r_x_at_my1),
            ("I_d_A", self.i_d),
            ("H_ME_at_VDD_Oe", self.h_me_at_vdd),
        ]
    }
}
