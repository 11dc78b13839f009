//! Classical fixed-step fourth-order Runge-Kutta over flat state vectors.

/// A first-order system dy/dt = f(t, y) on a flat `f64` state.
pub trait OdeSystem {
    fn rhs(&self, t: f64, y: &[f64], dydt: &mut [f64]);
}

impl<F: Fn(f64, &[f64], &mut [f64])> OdeSystem for F {
    fn rhs(&self, t: f64, y: &[f64], dydt: &mut [f64]) {
        self(t, y, dydt)
    }
}

/// Scratch buffers for one RK4 integrator; reuse across steps.
#[derive(Debug, Clone)]
pub struct Rk4 {
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    stage: Vec<f64>,
}

impl Rk4 {
    pub fn new(dim: usize) -> Self {
        Self {
            k1: vec![0.0; dim],
            k2: vec![0.0; dim],
            k3: vec![0.0; dim],
            k4: vec![0.0; dim],
            stage: vec![0.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.k1.len()
    }

    /// Advances `y` from `t` to `t + h` in place.
    pub fn step<S: OdeSystem + ?Sized>(&mut self, sys: &S, t: f64, h: f64, y: &mut [f64]) {
        assert_eq!(y.len(), self.dim(), "state length does not match integrator");
        let half = 0.5 * h;

        sys.rhs(t, y, &mut self.k1);
        for ((s, yi), k) in self.stage.iter_mut().zip(y.iter()).zip(&self.k1) {
            *s = yi + half * k;
        }
        sys.rhs(t + half, &self.stage, &mut self.k2);
        for ((s, yi), k) in self.stage.iter_mut().zip(y.iter()).zip(&self.k2) {
            *s = yi + half * k;
        }
        sys.rhs(t + half, &self.stage, &mut self.k3);
        for ((s, yi), k) in self.stage.iter_mut().zip(y.iter()).zip(&self.k3) {
            *s = yi + h * k;
        }
        sys.rhs(t + h, &self.stage, &mut self.k4);

        let sixth = h / 6.0;
        for i in 0..y.len() {
            y[i] += sixth * (self.k1[i] + 2.0 * (self.k2[i] + self.k3[i]) + self.k4[i]);
        }
    }

    /// Derivative at the start of the most recent step.
    pub fn last_k1(&self) -> &[f64] {
        &self.k1
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn decay_error(n_steps: usize) -> f64 {
        let sys = |_t: f64, y: &[f64], d: &mut [f64]| d[0] = -y[0];
        let mut rk = Rk4::new(1);
        let mut y = [1.0];
        let h = 1.0 / n_steps as f64;
        for i in 0..n_steps {
            rk.step(&sys, i as f64 * h, h, &mut y);
        }
        (y[0] - (-1.0f64).exp()).abs()
    }

    #[test]
    fn global_order_four_on_linear_decay() {
        let errs: Vec<f64> = [10, 20, 40, 80].iter().map(|&n| decay_error(n)).collect();
        for w in errs.windows(2) {
            let order = (w[0] / w[1]).log2();
            assert!(order > 3.8 && order < 4.2, "order {order}");
        }
    }

    #[test]
    fn local_error_is_fifth_order() {
        let sys = |_t: f64, y: &[f64], d: &mut [f64]| d[0] = -y[0];
        let mut rk = Rk4::new(1);
        let local = |h: f64, rk: &mut Rk4| {
            let mut y = [1.0];
            rk.step(&sys, 0.0, h, &mut y);
            (y[0] - (-h).exp()).abs()
        };
        let a = local(0.1, &mut rk);
        let b = local(0.05, &mut rk);
        let order = (a / b).log2();
        assert!((order - 5.0).abs() < 0.1, "{order}");
    }

    #[test]
    fn time_dependent_rhs_is_integrated_exactly_for_cubics() {
        // dy/dt = 3t^2 has the exact RK4 solution y = t^3
        let sys = |t: f64, _y: &[f64], d: &mut [f64]| d[0] = 3.0 * t * t;
        let mut rk = Rk4::new(1);
        let mut y = [0.0];
        for i in 0..4 {
            rk.step(&sys, i as f64 * 0.5, 0.5, &mut y);
        }
        assert!((y[0] - 8.0).abs() < 1e-12);
    }
}
