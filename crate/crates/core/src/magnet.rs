//! Macrospin field terms and the LLG right-hand side.

use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use rand::Rng;
use rand_distr::StandardNormal;

use crate::params::ParamSet;
use crate::Error;

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3 { x: 0.0, y: 0.0, z: 0.0 };
    pub const Y: Vec3 = Vec3 { x: 0.0, y: 1.0, z: 0.0 };

    #[inline]
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    #[inline]
    pub fn dot(self, o: Self) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    #[inline]
    pub fn cross(self, o: Self) -> Self {
        Self {
            x: self.y * o.z - self.z * o.y,
            y: self.z * o.x - self.x * o.z,
            z: self.x * o.y - self.y * o.x,
        }
    }

    #[inline]
    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    #[inline]
    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    #[inline]
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl AddAssign for Vec3 {
    #[inline]
    fn add_assign(&mut self, o: Vec3) {
        *self = *self + o;
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    #[inline]
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    #[inline]
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

impl Mul<Vec3> for f64 {
    type Output = Vec3;
    #[inline]
    fn mul(self, v: Vec3) -> Vec3 {
        Vec3::new(self * v.x, self * v.y, self * v.z)
    }
}

/// Uniaxial anisotropy field along the y easy axis [Oe].
pub fn anisotropy_field(m: Vec3, p: &ParamSet) -> Vec3 {
    Vec3::new(0.0, p.h_k() * m.y, 0.0)
}

/// Box-shape demagnetizing field [Oe], using inverse-square dimension weights.
pub fn demag_field(m: Vec3, p: &ParamSet) -> Vec3 {
    let [l, w, t] = p.fm_dims;
    let (il, iw, it) = (l.powi(-2), w.powi(-2), t.powi(-2));
    let scale = -p.m_s / (il + iw + it);
    Vec3::new(scale * il * m.x, scale * iw * m.y, scale * it * m.z)
}

/// One draw of the thermal field for an integration step of length `h` [Oe].
pub fn thermal_field<R: Rng + ?Sized>(rng: &mut R, p: &ParamSet, h: f64) -> Vec3 {
    if p.temperature == 0.0 {
        return Vec3::ZERO;
    }
    let sigma = p.sigma_thermal(h);
    let x: f64 = rng.sample(StandardNormal);
    let y: f64 = rng.sample(StandardNormal);
    let z: f64 = rng.sample(StandardNormal);
    Vec3::new(sigma * x, sigma * y, sigma * z)
}

/// dm/dt = γ m×H − αγ m×(m×H) on unit m [1/s].
#[inline]
pub fn llg_rhs(m: Vec3, h_eff: Vec3, p: &ParamSet) -> Vec3 {
    let mxh = m.cross(h_eff);
    let mxmxh = m.cross(mxh);
    p.gamma * mxh - (p.alpha * p.gamma) * mxmxh
}

pub fn renormalize(m: Vec3) -> Result<Vec3, Error> {
    let n = m.norm();
    if n == 0.0 || !n.is_finite() {
        return Err(Error::Numerical(format!("cannot renormalize magnetization {m:?}")));
    }
    Ok((1.0 / n) * m)
}
