use gpc_core::envs::{Env, EnvKind};
use gpc_core::flow::{sample, warm_start_noise};
use gpc_core::gpc::{train, GpcConfig};
use gpc_core::rng::StreamKey;

#[test]
fn euler_step_refinement_changes_little() {
    let env = Env::new(EnvKind::Pendulum);
    let mut cfg = GpcConfig::for_env(EnvKind::Pendulum);
    cfg.num_iterations = 2;
    cfg.num_envs = 16;
    let (model, _) = train(&cfg, &env).unwrap();
    let mut rng = StreamKey::new(9).rng();
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let obs = env.observe(&env.sample_initial_state(&mut rng));
        let u0 = warm_start_noise(&vec![0.0; model.flat_dim()], 0.0, &mut rng).unwrap();
        let coarse = sample(&model, &obs, &u0, 0.1).unwrap();
        let fine = sample(&model, &obs, &u0, 0.01).unwrap();
        let n = coarse.knots().len() as f64;
        let rms = (coarse.knots().iter().zip(fine.knots()).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / n).sqrt();
        worst = worst.max(rms);
    }
    assert!(worst < 0.05, "worst rms {worst}");
}
