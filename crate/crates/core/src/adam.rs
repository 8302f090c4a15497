//! Adam over a flat parameter vector.

#[derive(Debug, Clone)]
pub struct Adam {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    step: u64,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Adam {
    pub fn new(len: usize, learning_rate: f64) -> Self {
        Self {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            step: 0,
            m: vec![0.0; len],
            v: vec![0.0; len],
        }
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    /// One bias-corrected update of `params` in place.
    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) {
        assert_eq!(params.len(), self.m.len());
        assert_eq!(grads.len(), self.m.len());
        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        for (((p, &g), m), v) in params
            .iter_mut()
            .zip(grads)
            .zip(&mut self.m)
            .zip(&mut self.v)
        {
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            let m_hat = *m / bc1;
            let v_hat = *v / bc2;
            *p -= self.learning_rate * m_hat / (v_hat.sqrt() + self.epsilon);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_moves_by_learning_rate() {
        // With bias correction the first update is lr * sign(g).
        let mut opt = Adam::new(2, 0.1);
        let mut p = [1.0, -1.0];
        opt.step(&mut p, &[3.0, -0.001]);
        assert_close!(p[0], 0.9, 1e-6);
        assert_close!(p[1], -0.9, 1e-4);
    }

    #[test]
    fn minimizes_a_quadratic() {
        let mut opt = Adam::new(3, 0.05);
        let target = [1.5, -2.0, 0.25];
        let mut p = [0.0; 3];
        for _ in 0..3000 {
            let g: Vec<f64> = p.iter().zip(&target).map(|(x, t)| 2.0 * (x - t)).collect();
            opt.step(&mut p, &g);
        }
        for (x, t) in p.iter().zip(target) {
            assert_close!(*x, t, 1e-3);
        }
        assert_eq!(opt.steps_taken(), 3000);
    }

    #[test]
    fn zero_gradient_leaves_params_unchanged() {
        let mut opt = Adam::new(2, 0.5);
        let mut p = [0.3, 0.7];
        opt.step(&mut p, &[0.0, 0.0]);
        assert_eq!(p, [0.3, 0.7]);
    }
}
