//! Adam with bias correction and the two-stage learning-rate schedule
//! (initial rate, dropped by a decade at the halfway epoch).

#[derive(Clone, Debug)]
pub struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    step: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamState {
    pub fn new(n: usize) -> Self {
        AdamState { m: vec![0.0; n], v: vec![0.0; n], step: 0, beta1: 0.9, beta2: 0.999, epsilon: 1e-8 }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// One update. `grads` must be finite; the caller checks before stepping
    /// so the failing epoch can be reported.
    pub fn step(&mut self, params: &mut [f64], grads: &[f64], lr: f64) {
        assert_eq!(params.len(), self.m.len());
        assert_eq!(grads.len(), self.m.len());
        self.step += 1;
        let bc1 = 1.0 - self.beta1.powi(self.step as i32);
        let bc2 = 1.0 - self.beta2.powi(self.step as i32);
        for i in 0..params.len() {
            let g = grads[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            params[i] -= lr * m_hat / (v_hat.sqrt() + self.epsilon);
        }
    }
}

/// Step-wise schedule: `lr0` for the first half of training, `lr1` after.
pub fn lr_at(epoch: usize, total_epochs: usize, lr0: f64, lr1: f64) -> f64 {
    if epoch < total_epochs / 2 {
        lr0
    } else {
        lr1
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_parameters_unchanged() {
        let mut adam = AdamState::new(3);
        let mut p = vec![1.0, -2.0, 0.5];
        let before = p.clone();
        adam.step(&mut p, &[0.0; 3], 1e-3);
        assert_eq!(p, before);
        assert_eq!(adam.step_count(), 1);
    }

    #[test]
    fn constant_gradient_moves_at_learning_rate() {
        // With a constant gradient the bias-corrected update tends to
        // −sign(g)·lr per step.
        let mut adam = AdamState::new(1);
        let mut p = vec![0.0];
        let lr = 1e-2;
        for _ in 0..200 {
            adam.step(&mut p, &[3.5], lr);
        }
        let mut last = p[0];
        adam.step(&mut p, &[3.5], lr);
        let delta = last - p[0];
        assert!((delta - lr).abs() < 1e-4, "per-step move {delta}");
        last = p[0];
        adam.step(&mut p, &[3.5], lr);
        assert!(((last - p[0]) - lr).abs() < 1e-4);
    }

    #[test]
    fn quadratic_bowl_converges() {
        // L = ‖p‖²: gradient 2p; must reach ‖p‖ < 1e-6 within 5000 steps.
        let mut adam = AdamState::new(2);
        let mut p = vec![1.3, -0.7];
        for _ in 0..5000 {
            let g: Vec<f64> = p.iter().map(|v| 2.0 * v).collect();
            adam.step(&mut p, &g, 1e-3);
        }
        let norm = (p[0] * p[0] + p[1] * p[1]).sqrt();
        assert!(norm < 1e-6, "final ‖p‖ = {norm}");
    }

    #[test]
    fn schedule_halves() {
        assert_eq!(lr_at(0, 100, 1e-3, 1e-4), 1e-3);
        assert_eq!(lr_at(49, 100, 1e-3, 1e-4), 1e-3);
        assert_eq!(lr_at(50, 100, 1e-3, 1e-4), 1e-4);
        assert_eq!(lr_at(99, 100, 1e-3, 1e-4), 1e-4);
    }
}
