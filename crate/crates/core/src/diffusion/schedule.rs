//! Noise schedules and the elementary sampler steps.
//!
//! Two schedule families over normalized time t in [0, T], T = 1:
//! rectified flow (alpha = 1 - t, sigma = t, linear interpolation path) and a
//! cosine DDIM-style schedule (alpha^2 + sigma^2 = 1).

use super::DiffusionError;
use crate::util::derive_seed;
use ndarray::Array3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleKind {
    RectifiedFlow,
    DdimCosine,
}

/// alpha/sigma pair and a uniform step grid t_0 = T > ... > t_num_steps = 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSchedule {
    pub kind: ScheduleKind,
    pub terminal: f32,
    pub num_steps: usize,
}

impl NoiseSchedule {
    pub fn rectified_flow(num_steps: usize) -> Self {
        Self { kind: ScheduleKind::RectifiedFlow, terminal: 1.0, num_steps }
    }

    pub fn ddim_cosine(num_steps: usize) -> Self {
        Self { kind: ScheduleKind::DdimCosine, terminal: 1.0, num_steps }
    }

    pub fn alpha(&self, t: f32) -> f32 {
        let u = t / self.terminal;
        match self.kind {
            ScheduleKind::RectifiedFlow => 1.0 - u,
            ScheduleKind::DdimCosine => (std::f32::consts::FRAC_PI_2 * u).cos(),
        }
    }

    pub fn sigma(&self, t: f32) -> f32 {
        let u = t / self.terminal;
        match self.kind {
            ScheduleKind::RectifiedFlow => u,
            ScheduleKind::DdimCosine => (std::f32::consts::FRAC_PI_2 * u).sin(),
        }
    }

    /// The step grid, length `num_steps + 1`, from T down to exactly 0.
    pub fn steps(&self) -> Vec<f32> {
        (0..=self.num_steps)
            .map(|i| self.terminal * (1.0 - i as f32 / self.num_steps as f32))
            .collect()
    }

    pub fn delta_t(&self) -> f32 {
        self.terminal / self.num_steps as f32
    }
}

/// Draws a standard-normal latent of the given shape from a named stream.
pub fn gaussian_latent(shape: (usize, usize, usize), seed: u64, tag: &str) -> Array3<f32> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, tag));
    let mut out = Array3::zeros(shape);
    for v in out.iter_mut() {
        *v = StandardNormal.sample(&mut rng);
    }
    out
}

/// Forward corruption: x_t = alpha(t) * x0 + sigma(t) * z, elementwise.
pub fn forward_noise(
    x0: &Array3<f32>,
    t: f32,
    z: &Array3<f32>,
    schedule: &NoiseSchedule,
) -> Result<Array3<f32>, DiffusionError> {
    if x0.dim() != z.dim() {
        return Err(DiffusionError::Shape(format!(
            "x0 {:?} vs noise {:?}",
            x0.dim(),
            z.dim()
        )));
    }
    let a = schedule.alpha(t);
    let s = schedule.sigma(t);
    Ok(x0 * a + z * s)
}

/// One explicit Euler step of the reverse ODE: z_{t - dt} = z_t - v_hat * dt.
pub fn euler_step(z_t: &Array3<f32>, v_hat: &Array3<f32>, delta_t: f32) -> Array3<f32> {
    z_t - &(v_hat * delta_t)
}

/// Deterministic DDIM update from t to t_next given a noise prediction:
/// x0_hat = (z_t - sigma(t) eps) / alpha(t); z_next = alpha(t') x0_hat + sigma(t') eps.
pub fn ddim_step(
    z_t: &Array3<f32>,
    eps_hat: &Array3<f32>,
    t: f32,
    t_next: f32,
    schedule: &NoiseSchedule,
) -> Result<Array3<f32>, DiffusionError> {
    if z_t.dim() != eps_hat.dim() {
        return Err(DiffusionError::Shape(format!(
            "z_t {:?} vs eps {:?}",
            z_t.dim(),
            eps_hat.dim()
        )));
    }
    let a = schedule.alpha(t);
    if a.abs() < 1e-8 {
        return Err(DiffusionError::Numerical(format!(
            "alpha({t}) = {a} too small for DDIM inversion"
        )));
    }
    let x0_hat = (z_t - &(eps_hat * schedule.sigma(t))) / a;
    Ok(&x0_hat * schedule.alpha(t_next) + eps_hat * schedule.sigma(t_next))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array3;
    use rand::Rng;

    fn random_latent(seed: u64) -> Array3<f32> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Array3::from_shape_fn((4, 4, 3), |_| rng.gen_range(-1.0..1.0))
    }

    #[test]
    fn rectified_flow_boundary_identities() {
        let s = NoiseSchedule::rectified_flow(28);
        assert_eq!(s.alpha(0.0), 1.0);
        assert_eq!(s.sigma(0.0), 0.0);
        assert_eq!(s.alpha(1.0), 0.0);
        assert_eq!(s.sigma(1.0), 1.0);
        let x0 = random_latent(1);
        let z = random_latent(2);
        let at0 = forward_noise(&x0, 0.0, &z, &s).unwrap();
        assert_eq!(at0, x0, "t = 0 returns x0 exactly");
        let at_t = forward_noise(&x0, 1.0, &z, &s).unwrap();
        assert_eq!(at_t, z, "t = T returns the noise exactly");
    }

    #[test]
    fn cosine_schedule_is_a_unit_circle() {
        let s = NoiseSchedule::ddim_cosine(28);
        for i in 0..=40 {
            let t = i as f32 / 40.0;
            let v = s.alpha(t).powi(2) + s.sigma(t).powi(2);
            assert!((v - 1.0).abs() < 1e-6, "alpha^2 + sigma^2 = 1 at t={t}");
        }
    }

    #[test]
    fn high_noise_mix_matches_time() {
        let s = NoiseSchedule::rectified_flow(28);
        let x0 = random_latent(3);
        let z = random_latent(4);
        let xt = forward_noise(&x0, 0.913, &z, &s).unwrap();
        let expect = &x0 * (1.0 - 0.913f32) + &z * 0.913f32;
        for (a, b) in xt.iter().zip(expect.iter()) {
            assert!((a - b).abs() < 1e-7);
        }
    }

    #[test]
    fn step_grid_is_uniform_with_pinned_endpoints() {
        let s = NoiseSchedule::rectified_flow(28);
        let grid = s.steps();
        assert_eq!(grid.len(), 29);
        assert_eq!(grid[0], 1.0);
        assert_eq!(grid[28], 0.0);
        for w in grid.windows(2) {
            assert!((w[0] - w[1] - 1.0 / 28.0).abs() < 1e-6, "uniform spacing 1/28");
        }
    }

    #[test]
    fn euler_with_zero_velocity_is_identity() {
        let z = random_latent(5);
        let v = Array3::zeros((4, 4, 3));
        assert_eq!(euler_step(&z, &v, 0.25), z);
    }

    #[test]
    fn euler_exact_velocity_recovers_x0_for_any_step_count() {
        // On the rectified-flow linear path the true velocity is constant
        // (z_T - x0), so Euler integration is exact regardless of step count.
        let x0 = random_latent(6);
        let z_terminal = random_latent(7);
        let v = &z_terminal - &x0;
        for steps in [1usize, 7, 28] {
            let schedule = NoiseSchedule::rectified_flow(steps);
            let mut z = z_terminal.clone();
            for _ in 0..steps {
                z = euler_step(&z, &v, schedule.delta_t());
            }
            let max_err = z
                .iter()
                .zip(x0.iter())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0f32, f32::max);
            assert!(max_err <= 1e-5, "steps={steps} max err {max_err}");
        }
    }

    #[test]
    fn ddim_exact_eps_recovers_x0() {
        let s = NoiseSchedule::ddim_cosine(28);
        let x0 = random_latent(8);
        let eps = random_latent(9);
        let t = 0.7;
        let z_t = forward_noise(&x0, t, &eps, &s).unwrap();
        // Stepping to t_next = 0 with the true eps inverts the forward map.
        let z0 = ddim_step(&z_t, &eps, t, 0.0, &s).unwrap();
        for (a, b) in z0.iter().zip(x0.iter()) {
            assert!((a - b).abs() <= 1e-6);
        }
    }

    #[test]
    fn ddim_noop_when_t_next_equals_t() {
        let s = NoiseSchedule::ddim_cosine(28);
        let x0 = random_latent(10);
        let eps = random_latent(11);
        let t = 0.4;
        let z_t = forward_noise(&x0, t, &eps, &s).unwrap();
        let same = ddim_step(&z_t, &eps, t, t, &s).unwrap();
        for (a, b) in same.iter().zip(z_t.iter()) {
            assert!((a - b).abs() <= 1e-6);
        }
    }

    #[test]
    fn ddim_two_half_steps_match_one_step_on_exact_eps() {
        let s = NoiseSchedule::ddim_cosine(28);
        let x0 = random_latent(12);
        let eps = random_latent(13);
        let z_t = forward_noise(&x0, 0.8, &eps, &s).unwrap();
        let direct = ddim_step(&z_t, &eps, 0.8, 0.2, &s).unwrap();
        let mid = ddim_step(&z_t, &eps, 0.8, 0.5, &s).unwrap();
        let via_mid = ddim_step(&mid, &eps, 0.5, 0.2, &s).unwrap();
        for (a, b) in direct.iter().zip(via_mid.iter()) {
            assert!((a - b).abs() <= 1e-6);
        }
    }

    #[test]
    fn ddim_rejects_vanishing_alpha() {
        let s = NoiseSchedule::ddim_cosine(28);
        let z = random_latent(14);
        let eps = random_latent(15);
        assert!(matches!(
            ddim_step(&z, &eps, 1.0, 0.5, &s),
            Err(DiffusionError::Numerical(_))
        ));
    }

    #[test]
    fn gaussian_latent_is_seed_stable() {
        let a = gaussian_latent((4, 4, 3), 9, "x");
        let b = gaussian_latent((4, 4, 3), 9, "x");
        let c = gaussian_latent((4, 4, 3), 9, "y");
        assert_eq!(a, b);
        assert_ne!(a, c);
    }
}
