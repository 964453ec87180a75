use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use fecim::analysis::{run_onoff_error_mc, run_sigma_mac_mc, McSetup};
use fecim::bnn::synthetic::{prototype_task, PrototypeTask};
use fecim::bnn::{reference_infer, Deployment, MacroConfig};
use fecim::{FeFetParams, MacroArray, OnOffRatio, VariationSpec, XnorModel, FEMTO};
use fecim_bench::{programmed_macro, random_bits};

fn mac(c: &mut Criterion) {
    let (array, stim) = programmed_macro(3);
    let mut g = c.benchmark_group("mac_128x128");
    g.bench_function("ideal", |b| {
        b.iter(|| array.mac_evaluate(&stim, XnorModel::Ideal).unwrap())
    });
    g.bench_function("divider", |b| {
        b.iter(|| array.mac_evaluate(&stim, XnorModel::Divider).unwrap())
    });
    let compiled = array.compile(XnorModel::Ideal);
    g.bench_function("compiled_ideal", |b| {
        b.iter(|| compiled.evaluate(&stim, None, None).unwrap())
    });
    g.finish();
}

fn program(c: &mut Criterion) {
    let blank = MacroArray::new(128, 128, FeFetParams::default(), 1.2 * FEMTO);
    let w = random_bits(128, 128, 5);
    c.bench_function("program_128x128", |b| b.iter(|| blank.program(&w).unwrap()));
    let spec = VariationSpec::default();
    c.bench_function("resample_128x128", |b| {
        let mut t = 0;
        b.iter(|| {
            t += 1;
            blank.resample(&spec, 0, t).unwrap()
        })
    });
}

fn monte_carlo(c: &mut Criterion) {
    let setup = McSetup {
        params: FeFetParams::default(),
        c_nominal: 1.2 * FEMTO,
        spec: VariationSpec::default(),
        n: 128,
    };
    let mut g = c.benchmark_group("monte_carlo_2048");
    g.sample_size(10);
    g.bench_function("sigma_mac", |b| {
        b.iter(|| run_sigma_mac_mc(&setup, &[0.5], 2048).unwrap())
    });
    let finite = McSetup {
        spec: VariationSpec {
            on_off_ratio: OnOffRatio::Finite(1e5),
            ..setup.spec
        },
        ..setup
    };
    g.bench_function("onoff_error", |b| {
        b.iter(|| run_onoff_error_mc(&finite, &[0.5], 2048).unwrap())
    });
    g.finish();
}

fn bnn(c: &mut Criterion) {
    let (model, data) = prototype_task(
        7,
        &PrototypeTask {
            samples: 64,
            ..PrototypeTask::default()
        },
    )
    .unwrap();
    let (dep, _) = Deployment::program(&model, MacroConfig::default()).unwrap();
    let chip = dep
        .instance(
            &VariationSpec {
                sigma_c: 0.1,
                ..VariationSpec::ideal(1)
            },
            0,
        )
        .unwrap();
    let mut g = c.benchmark_group("bnn_128_100_10");
    g.bench_function("reference", |b| {
        b.iter(|| reference_infer(&model, &data.inputs[0]).unwrap())
    });
    g.bench_function("macro", |b| {
        b.iter(|| chip.infer(&model, &data.inputs[0]).unwrap())
    });
    g.bench_function("chip_instance", |b| {
        b.iter_batched(
            || VariationSpec {
                sigma_c: 0.1,
                ..VariationSpec::ideal(2)
            },
            |s| dep.instance(&s, 0).unwrap(),
            BatchSize::SmallInput,
        )
    });
    g.finish();
}

criterion_group!(benches, mac, program, monte_carlo, bnn);
criterion_main!(benches);
