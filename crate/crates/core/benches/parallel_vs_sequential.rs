//! Sequential versus rayon execution for the three parallel hot spots.
//! Build with `--no-default-features` to confirm the fallback path costs the
//! same as `Execution::Sequential`.

use std::sync::Arc;

use aixi_core::aixitl::{self, Bounds};
use aixi_core::{Action, Alphabet, ClassSpec, Execution, Family, History, HorizonPolicy, MixtureState, ModelRho, Planner, ProgramClass};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn agent_class(max_len: usize) -> Arc<ProgramClass> {
    Arc::new(ProgramClass::build(Arc::new(Alphabet::agent_default()), &ClassSpec::new(max_len, Family::Bernoulli)).unwrap())
}

fn expectimax(c: &mut Criterion) {
    let class = Arc::new(agent_class(16).truncated(256).unwrap());
    let xi = MixtureState::new(class.clone());
    let h = History::new(class.alphabet().clone());
    let mut group = c.benchmark_group("expectimax_depth6");
    group.sample_size(10);
    for (name, exec) in MODES {
        let planner = Planner::default().with_exec(exec);
        let hp = HorizonPolicy::moving(6).unwrap();
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| planner.optimal_value(ModelRho::Mixture(&xi), &h, &hp).unwrap())
        });
    }
    group.finish();
}

fn xi_joint(c: &mut Criterion) {
    let class = agent_class(16);
    let xi = MixtureState::new(class.clone());
    let a = class.alphabet();
    let ys: Vec<Action> = (0..8).map(|k| Action(k % 2)).collect();
    let xs: Vec<_> = (0..8).map(|k| a.percept(k % 4)).collect();
    let mut group = c.benchmark_group("xi_joint_4129_members");
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| xi.xi_joint_with(exec, &ys, &xs).unwrap())
        });
    }
    group.finish();
}

fn setup(c: &mut Criterion) {
    let ctx = Arc::new(aixitl::bandit_context(12, Bounds::bundled().t_tilde).unwrap());
    let mut group = c.benchmark_group("pbest_setup_bundled");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| aixitl::pbest_setup(ctx.clone(), Bounds::bundled(), exec).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, expectimax, xi_joint, setup);
criterion_main!(benches);
