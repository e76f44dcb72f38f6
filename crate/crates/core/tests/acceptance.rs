//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any fails.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use qtl_core::checkpoint::AnyModel;
use qtl_core::data::{split_labeled, Dataset, Domain, FeatureNormalizer, SplitSize};
use qtl_core::evaluation::{accuracy, auc_fraction};
use qtl_core::experiment::{train_model, FixtureSpec, ModelSpec};
use qtl_core::model::{ModelKind, ParamGroup, Trainable};
use qtl_core::neural::{DnnConfig, DnnModel};
use qtl_core::quantum_classifier::{DressedQnn, GradientMethod, QnnConfig, StdAnsatz};
use qtl_core::statevector::run_circuit;
use qtl_core::training::{finetune_once, repeat_seeds, run_repeated, RepeatedTransfer, TrainConfig, TransferConfig};

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn std_law() -> Outcome {
    for n in 2..=12 {
        for l in 1..=4 {
            let p = StdAnsatz::new(n, l).map_err(|e| e.to_string())?.n_params();
            ensure(p == 2 * (n - 1) * l, || format!("n={n} L={l}: {p} parameters"))?;
        }
    }
    let p = StdAnsatz::new(10, 1).map_err(|e| e.to_string())?.n_params();
    ensure(p == 18, || format!("n=10 L=1: {p}"))?;
    Ok("2(n-1)L for n in 2..=12, L in 1..=4; 18 at n=10, L=1".into())
}

fn dnn_count() -> Outcome {
    let m = DnnModel::zeroed(DnnConfig::default(), FeatureNormalizer::identity(36)).map_err(|e| e.to_string())?;
    ensure(m.n_params() == 34_808, || format!("{} parameters", m.n_params()))?;
    Ok("34808 parameters".into())
}

fn simulator() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let (mut worst_amp, mut worst_norm) = (0.0f64, 0.0f64);
    for _ in 0..100 {
        let n = rng.random_range(1..=4);
        let n_gates = rng.random_range(0..=20);
        let (ops, params) = common::random_circuit(&mut rng, n, n_gates);
        let state = run_circuit(n, &ops, &params).map_err(|e| e.to_string())?;
        let oracle = common::oracle_state(n, &ops, &params);
        for (a, b) in state.amplitudes().iter().zip(&oracle) {
            worst_amp = worst_amp.max((a - b).norm());
        }
        worst_norm = worst_norm.max((state.norm_sqr() - 1.0).abs());
    }
    ensure(worst_amp < 1e-10 && worst_norm < 1e-10, || {
        format!("max amplitude error {worst_amp:e}, norm drift {worst_norm:e}")
    })?;
    Ok(format!("100 circuits, max amplitude error {worst_amp:.1e}, norm drift {worst_norm:.1e}"))
}

fn small_qnn(n_qubits: usize, n_layers: usize, seed: u64, gradient: GradientMethod) -> DressedQnn {
    let cfg = QnnConfig {
        n_qubits,
        n_layers,
        n_features: 5,
        n_classes: 3,
        gradient,
    };
    DressedQnn::new(cfg, FeatureNormalizer::identity(5), &mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
}

fn projected_logits(m: &DressedQnn, encoding: &[f64], theta: &[f64], upstream: &[f64]) -> f64 {
    let mut m = m.clone();
    m.theta_mut().copy_from_slice(theta);
    let z = m.expectations_for_angles(encoding).unwrap();
    let n = z.len();
    m.output_weights()
        .chunks_exact(n)
        .zip(m.output_bias())
        .zip(upstream)
        .map(|((row, b), u)| u * (b + row.iter().zip(&z).map(|(w, v)| w * v).sum::<f64>()))
        .sum()
}

fn gradients() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let h = 1e-5;
    let mut worst_shift = 0.0f64;
    for trial in 0..6 {
        let n = 4 + trial % 3;
        let m = small_qnn(n, 1 + trial % 2, trial as u64, GradientMethod::ParameterShift);
        let x: Vec<f64> = (0..5).map(|_| rng.random_range(-2.0..2.0)).collect();
        let upstream: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
        let g = m.param_shift_grad(&x, &upstream).map_err(|e| e.to_string())?;
        let enc = m.encoding_angles(&x).unwrap();
        let theta = m.theta().to_vec();
        for i in 0..enc.len() {
            let fd = common::central_difference(|e| projected_logits(&m, e, &theta, &upstream), &enc, i, h);
            worst_shift = worst_shift.max((fd - g.encoding[i]).abs());
        }
        for i in 0..theta.len() {
            let fd = common::central_difference(|t| projected_logits(&m, &enc, t, &upstream), &theta, i, h);
            worst_shift = worst_shift.max((fd - g.theta[i]).abs());
        }
    }
    ensure(worst_shift < 1e-6, || format!("parameter-shift vs FD max error {worst_shift:e}"))?;

    let mut worst_rel = 0.0f64;
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for (trial, method) in [GradientMethod::ParameterShift, GradientMethod::Adjoint].into_iter().cycle().take(6).enumerate() {
        let m = small_qnn(4 + trial % 3, 1, 100 + trial as u64, method);
        let x: Vec<f64> = (0..5).map(|_| rng.random_range(-2.0..2.0)).collect();
        let label = trial % 3;
        let g = m.sample_gradient(&x, label).map_err(|e| e.to_string())?;
        let loss = |p: &[f64]| {
            let mut c = m.clone();
            c.params_mut().copy_from_slice(p);
            common::cross_entropy(&c.forward(&x).unwrap(), label)
        };
        for i in 0..m.params().len() {
            let fd = common::central_difference(loss, m.params(), i, h);
            let err = (fd - g.grad[i]).abs();
            ensure(err <= 1e-4 * fd.abs() + 1e-8, || format!("hybrid param {i}: {} vs fd {fd}", g.grad[i]))?;
            if fd.abs() > 1e-6 {
                worst_rel = worst_rel.max(err / fd.abs());
            }
        }
    }
    Ok(format!("shift vs FD max abs error {worst_shift:.1e}; hybrid max rel error {worst_rel:.1e}"))
}

fn auc() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for trial in 0..200 {
        let n = rng.random_range(1..=50);
        let scores: Vec<f64> = (0..n).map(|_| rng.random_range(0..8) as f64 * 0.125).collect();
        let truth: Vec<bool> = (0..n).map(|_| rng.random_bool(0.4)).collect();
        let got = auc_fraction(&scores, &truth)
            .map_err(|e| e.to_string())?
            .map(|f| (f.numerator, f.denominator));
        let want = common::pairwise_auc(&scores, &truth);
        ensure(got == want, || format!("trial {trial}: {got:?} vs {want:?}"))?;
    }
    Ok("200 trials equal the pairwise oracle exactly".into())
}

struct ModelResult {
    in_domain: f64,
    target: f64,
    tl: RepeatedTransfer,
    params: Vec<u64>,
}

struct Fixture {
    dataset: Dataset,
    dnn: ModelResult,
    qnn: ModelResult,
    qnn_model: DressedQnn,
    train: TrainConfig,
}

fn bits(v: &[f64]) -> Vec<u64> {
    v.iter().map(|x| x.to_bits()).collect()
}

fn run_fixture() -> qtl_core::Result<Fixture> {
    let spec = FixtureSpec::default();
    let dataset = spec.dataset()?;
    let split = split_labeled(&dataset, Domain::Source, SplitSize::Count(spec.source_labels), spec.seed)?;
    let train_set = dataset.select(&split.labeled);
    let held_out = dataset.select(&split.eval);
    let target = dataset.domain_samples(Domain::Target);
    let train = TrainConfig {
        seed: spec.seed,
        deterministic: true,
        ..TrainConfig::default()
    };

    let mut results = Vec::new();
    let mut qnn_model = None;
    for kind in [ModelKind::Dnn, ModelKind::Qnn] {
        let mut model_spec = ModelSpec::new(kind);
        model_spec.qnn.gradient = GradientMethod::Adjoint;
        let (model, _) = train_model(&model_spec, &train_set, None, &train)?;
        let transfer = TransferConfig::new(kind, SplitSize::Count(spec.transfer_samples))?;
        let (tl, params) = match &model {
            AnyModel::Dnn(m) => (run_repeated(m, &dataset, &transfer, &train, spec.repeats)?, bits(m.params())),
            AnyModel::Qnn(m) => {
                qnn_model = Some(m.clone());
                (run_repeated(m, &dataset, &transfer, &train, spec.repeats)?, bits(m.params()))
            }
            _ => unreachable!(),
        };
        results.push(ModelResult {
            in_domain: accuracy(&model, &held_out)?,
            target: accuracy(&model, &target)?,
            tl,
            params,
        });
    }
    let qnn = results.pop().unwrap();
    let dnn = results.pop().unwrap();
    Ok(Fixture {
        dataset,
        dnn,
        qnn,
        qnn_model: qnn_model.unwrap(),
        train,
    })
}

fn freeze_contract(f: &Fixture) -> Outcome {
    let transfer = TransferConfig::new(ModelKind::Qnn, SplitSize::Count(104)).map_err(|e| e.to_string())?;
    let (split_seed, shuffle_seed) = repeat_seeds(f.train.seed, 1, transfer.repeat_mode)[0];
    let before = &f.qnn_model;
    let (after, _) =
        finetune_once(before, &f.dataset, &transfer, &f.train, split_seed, shuffle_seed).map_err(|e| e.to_string())?;
    let mut changed = 0;
    for (group, range) in before.param_groups() {
        let same = bits(&before.params()[range.clone()]) == bits(&after.params()[range.clone()]);
        match group {
            ParamGroup::InputLayer | ParamGroup::OutputLayer => {
                ensure(same, || format!("{group:?} changed during fine-tuning"))?
            }
            _ => {
                changed += before.params()[range.clone()]
                    .iter()
                    .zip(&after.params()[range])
                    .filter(|(a, b)| a != b)
                    .count()
            }
        }
    }
    ensure(before.normalizer() == after.normalizer(), || "normalizer changed".into())?;
    ensure(changed > 0, || "no circuit angle was updated".into())?;
    Ok(format!("input/output layers bitwise unchanged; {changed}/18 angles updated"))
}

fn in_domain(f: &Fixture) -> Outcome {
    let (d, q) = (f.dnn.in_domain, f.qnn.in_domain);
    ensure(d >= 0.95 && q >= 0.95, || format!("dnn {d:.4}, qnn {q:.4}"))?;
    Ok(format!("dnn {d:.4}, qnn {q:.4} (>= 0.95)"))
}

fn cross_domain(f: &Fixture) -> Outcome {
    let mut parts = Vec::new();
    for (name, r) in [("dnn", &f.dnn), ("qnn", &f.qnn)] {
        let drop = r.in_domain - r.target;
        ensure((0.75..=0.88).contains(&r.target) && drop >= 0.05, || {
            format!("{name}: target {:.4}, drop {drop:.4}", r.target)
        })?;
        parts.push(format!("{name} target {:.4} (drop {:.4})", r.target, drop));
    }
    Ok(parts.join(", "))
}

fn transfer(f: &Fixture) -> Outcome {
    let mut parts = Vec::new();
    for (name, r) in [("dnn", &f.dnn), ("qnn", &f.qnn)] {
        let t = &r.tl;
        ensure(t.mean_after >= 0.90 && t.mean_gain() >= 0.05, || {
            format!("{name}: {:.4} -> {:.4}", t.mean_before, t.mean_after)
        })?;
        parts.push(format!(
            "{name} {:.4} -> {:.4} ± {:.4}",
            t.mean_before, t.mean_after, t.std_after
        ));
    }
    Ok(parts.join(", "))
}

/// Values from the first verified run of the fixture: in-domain, target,
/// then mean/std before and after transfer.
const REGRESSION: [(&str, f64, f64, f64, f64, f64, f64); 2] = [
    (
        "dnn",
        1.0,
        0.823076923076923,
        0.8228632478632477,
        0.0020716580587249196,
        0.9978632478632479,
        0.0015109119256122756,
    ),
    (
        "qnn",
        1.0,
        0.8105769230769231,
        0.8087606837606838,
        0.0022410445473721105,
        0.9679487179487178,
        0.00382233842307655,
    ),
];

fn regression(f: &Fixture) -> Outcome {
    let mut mismatches = Vec::new();
    for ((name, in_dom, target, mb, sb, ma, sa), r) in REGRESSION.iter().zip([&f.dnn, &f.qnn]) {
        let got = [r.in_domain, r.target, r.tl.mean_before, r.tl.std_before, r.tl.mean_after, r.tl.std_after];
        let want = [*in_dom, *target, *mb, *sb, *ma, *sa];
        if !got.iter().zip(&want).all(|(a, b)| (a - b).abs() < 1e-12) {
            mismatches.push(format!("{name}: got {got:?}, stored {want:?}"));
        }
    }
    ensure(mismatches.is_empty(), || mismatches.join("; "))?;
    Ok("in-domain, target and transfer mean/std match stored values".into())
}

fn determinism(f: &Fixture) -> Outcome {
    let again = run_fixture().map_err(|e| e.to_string())?;
    for (name, a, b) in [("dnn", &f.dnn, &again.dnn), ("qnn", &f.qnn, &again.qnn)] {
        ensure(a.params == b.params, || format!("{name}: pretrained parameters differ"))?;
        ensure(
            a.in_domain.to_bits() == b.in_domain.to_bits()
                && a.target.to_bits() == b.target.to_bits()
                && a.tl == b.tl,
            || format!("{name}: metrics differ"),
        )?;
    }
    Ok("full fixture rerun is bit-identical".into())
}

fn report(name: &str, f: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
        Err(p
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_else(|| "panic".into()))
    });
    let secs = start.elapsed().as_secs_f64();
    match outcome {
        Ok(detail) => {
            println!("PASS  {name}: {detail} [{secs:.1}s]");
            true
        }
        Err(detail) => {
            println!("FAIL  {name}: {detail} [{secs:.1}s]");
            false
        }
    }
}

fn main() -> ExitCode {
    let mut ok = true;
    ok &= report("std-parameter-law", std_law);
    ok &= report("dnn-parameter-count", dnn_count);
    ok &= report("simulator-vs-dense-oracle", simulator);
    ok &= report("parameter-shift-and-hybrid-gradients", gradients);
    ok &= report("auc-vs-pairwise-oracle", auc);

    let start = Instant::now();
    match run_fixture() {
        Ok(f) => {
            println!("      fixture pipeline finished in {:.1}s", start.elapsed().as_secs_f64());
            ok &= report("freeze-contract", || freeze_contract(&f));
            ok &= report("fixture-in-domain-accuracy", || in_domain(&f));
            ok &= report("fixture-cross-domain-degradation", || cross_domain(&f));
            ok &= report("fixture-transfer-recovery", || transfer(&f));
            ok &= report("fixture-regression-values", || regression(&f));
            ok &= report("determinism", || determinism(&f));
        }
        Err(e) => {
            println!("FAIL  fixture pipeline: {e}");
            ok = false;
        }
    }
    if ok {
        println!("acceptance: all criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: FAILED");
        ExitCode::FAILURE
    }
}
