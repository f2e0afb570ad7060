//! Throughput of the data-parallel hot paths.
//!
//! With the default `parallel` feature each benchmark runs on the global
//! rayon pool and on a one-thread pool. Build with `--no-default-features`
//! for the plain sequential implementation.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use gpc_core::envs::{Env, EnvKind};
use gpc_core::flow::{sample, FlowModel};
use gpc_core::net::Activation;
use gpc_core::par;
use gpc_core::rng::StreamKey;
use gpc_core::spc::{evaluate_candidates, sample_proposal, ActionSequence, RiskAggregator, SpcProblem, WeightingFn};
use rand::Rng;

const SAMPLES: usize = 128;

fn variants() -> Vec<(String, Option<usize>)> {
    #[cfg(feature = "parallel")]
    {
        vec![("pool".into(), None), ("1-thread".into(), Some(1))]
    }
    #[cfg(not(feature = "parallel"))]
    {
        vec![("sequential".into(), None)]
    }
}

fn run_on<R: Send>(threads: Option<usize>, f: impl FnOnce() -> R + Send) -> R {
    #[cfg(feature = "parallel")]
    if let Some(n) = threads {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(n).build().expect("thread pool");
        return pool.install(f);
    }
    let _ = threads;
    f()
}

fn rollouts(c: &mut Criterion) {
    let mut group = c.benchmark_group("rollouts");
    for kind in [EnvKind::Pendulum, EnvKind::DoubleCartpole] {
        let env = Env::new(kind);
        let domains = [env.nominal];
        let problem = SpcProblem {
            env: &env,
            domains: &domains,
            weighting: WeightingFn::PredictiveSampling,
            risk: RiskAggregator::Average,
            sigma: 0.3,
            num_gaussian: SAMPLES,
        };
        let mut rng = StreamKey::new(0).rng();
        let state = env.sample_initial_state(&mut rng);
        let mean = ActionSequence::zeros(env.spec.num_knots, env.spec.action_dim, env.spec.horizon_steps());
        let seqs = sample_proposal(&mean, 0.3, SAMPLES, &mut rng).unwrap();
        group.throughput(Throughput::Elements(SAMPLES as u64));
        for (name, threads) in variants() {
            group.bench_with_input(BenchmarkId::new(kind.name(), &name), &threads, |b, &threads| {
                b.iter(|| run_on(threads, || evaluate_candidates(&problem, &state, &seqs).unwrap()))
            });
        }
    }
    group.finish();
}

fn policy_samples(c: &mut Criterion) {
    let env = Env::new(EnvKind::Pendulum);
    let spec = &env.spec;
    let model = FlowModel::new(
        spec.num_knots,
        spec.action_dim,
        spec.obs_dim,
        spec.horizon_steps(),
        &[64, 64],
        Activation::Swish,
        StreamKey::new(1),
    )
    .unwrap();
    let obs = env.observe(&env.sample_initial_state(&mut StreamKey::new(2).rng()));
    let flat = model.flat_dim();
    let mut group = c.benchmark_group("policy_samples");
    group.throughput(Throughput::Elements(SAMPLES as u64));
    for (name, threads) in variants() {
        group.bench_with_input(BenchmarkId::new("pendulum", &name), &threads, |b, &threads| {
            b.iter(|| {
                run_on(threads, || {
                    par::map_range(SAMPLES, |i| {
                        let mut rng = StreamKey::new(3).child(i as u64).rng();
                        let u0: Vec<f64> = (0..flat).map(|_| rng.random_range(-1.0..1.0)).collect();
                        sample(&model, &obs, &u0, 0.1).unwrap()
                    })
                })
            })
        });
    }
    group.finish();
}

criterion_group!(benches, rollouts, policy_samples);
criterion_main!(benches);
