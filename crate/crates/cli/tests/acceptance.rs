//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs as a plain binary (`harness = false`) so the lines come out in
//! order and the statistical runs share their trained teachers. Exits
//! nonzero if any hard criterion fails; the trend criterion (6) is soft and
//! only reported.

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use calikd::calibration::{
    calibration_report, ece, fit_temperature, nll, FitOptions, LogitSet, ReliabilityHistogram,
};
use calikd::data::logits_io::{logits_from_csv, logits_to_csv};
use calikd::data::{parse_idx, split, SplitFractions, SyntheticSpec};
use calikd::distill::{
    distill_student, kd_loss, kd_loss_and_grad, train_and_calibrate_teacher, DistillConfig, KdMode,
};
use calikd::nnet::loss::{argmax_rows, cross_entropy_with_grad, loss_and_grad, softmax, Targets};
use calikd::nnet::{mlp_dims, Dense};
use calikd::rng::{stream, Stream};
use calikd::{train, Error, MlpModel, SweepSpec, TargetMode, TrainConfig};
use calikd_cli::commands::{self, CalibrationRecord, Context, ReportOutput};
use calikd_cli::config::ExperimentConfig;
use ndarray::{Array2, ArrayView2};
use rand::RngExt;
use rand_distr::{Distribution, StandardNormal};

struct Line {
    id: u8,
    name: &'static str,
    pass: bool,
    soft: bool,
    detail: String,
    elapsed: Duration,
}

fn run(id: u8, name: &'static str, soft: bool, f: impl FnOnce() -> (bool, String)) -> Line {
    let start = Instant::now();
    let (pass, detail) = match catch_unwind(AssertUnwindSafe(f)) {
        Ok(r) => r,
        Err(e) => {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            (false, format!("panicked: {msg}"))
        }
    };
    let line = Line { id, name, pass, soft, detail, elapsed: start.elapsed() };
    eprintln!("  ... criterion {id} finished in {:.1} s", line.elapsed.as_secs_f64());
    line
}

fn within(line: &mut Line, limit: Duration) {
    if line.elapsed > limit {
        line.pass = false;
        line.detail.push_str(&format!(
            "; runtime {:.1} s exceeds {} s",
            line.elapsed.as_secs_f64(),
            limit.as_secs()
        ));
    }
}

fn randn(rows: usize, cols: usize, rng: &mut impl rand::Rng) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| StandardNormal.sample(rng))
}

// ---------------------------------------------------------------- 1

const FD_STEP: f64 = 1e-4;

fn rel_err(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(1e-6)
}

fn relu_pattern(layers: &[Dense], x: ArrayView2<f64>) -> Vec<bool> {
    let mut signs = Vec::new();
    let mut h = x.to_owned();
    for l in &layers[..layers.len() - 1] {
        let z = h.dot(&l.weights) + &l.bias;
        signs.extend(z.iter().map(|&v| v > 0.0));
        h = z.mapv(|v| v.max(0.0));
    }
    signs
}

/// Worst relative error over all parameters, plus (checked, skipped-at-kink).
fn fd_model(
    model: &MlpModel,
    x: ArrayView2<f64>,
    grads: &[Dense],
    loss: impl Fn(&MlpModel) -> f64,
) -> (f64, usize, usize) {
    let base = relu_pattern(model.layers(), x);
    let layers = model.layers().to_vec();
    let (mut worst, mut checked, mut skipped) = (0.0f64, 0, 0);
    for (li, layer) in layers.iter().enumerate() {
        let (n_w, cols) = (layer.weights.len(), layer.out_dim());
        for p in 0..n_w + layer.bias.len() {
            let eval = |d: f64| {
                let mut ls = layers.clone();
                if p < n_w {
                    ls[li].weights[[p / cols, p % cols]] += d;
                } else {
                    ls[li].bias[p - n_w] += d;
                }
                let same = relu_pattern(&ls, x) == base;
                (loss(&MlpModel::from_layers(ls).unwrap()), same)
            };
            let ((up, a), (down, b)) = (eval(FD_STEP), eval(-FD_STEP));
            if !(a && b) {
                skipped += 1;
                continue;
            }
            let analytic = if p < n_w {
                grads[li].weights[[p / cols, p % cols]]
            } else {
                grads[li].bias[p - n_w]
            };
            worst = worst.max(rel_err(analytic, (up - down) / (2.0 * FD_STEP)));
            checked += 1;
        }
    }
    (worst, checked, skipped)
}

fn criterion_gradients() -> (bool, String) {
    let mut rng = stream(2024, Stream::Data);
    let (mut worst_mlp, mut checked, mut skipped) = (0.0f64, 0, 0);
    for case in 0..50u64 {
        let layers = rng.random_range(1..=3usize);
        let mut dims = vec![rng.random_range(1..=8usize)];
        dims.extend((1..layers).map(|_| rng.random_range(1..=8usize)));
        dims.push(rng.random_range(2..=8usize));
        let model = MlpModel::seeded(&dims, case).unwrap();
        let n = rng.random_range(1..=6usize);
        let x = randn(n, dims[0], &mut rng);
        let k = *dims.last().unwrap();
        let labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..k)).collect();
        let temp = rng.random_range(0.5..4.0);
        let (_, g) = loss_and_grad(&model, x.view(), Targets::Hard(&labels), temp).unwrap();
        let (w, c, s) = fd_model(&model, x.view(), &g.layers, |m| {
            cross_entropy_with_grad(
                m.forward(x.view()).unwrap().view(),
                Targets::Hard(&labels),
                temp,
            )
            .unwrap()
            .0
        });
        worst_mlp = worst_mlp.max(w);
        checked += c;
        skipped += s;
    }
    let mut worst_kd = 0.0f64;
    let mut kd_checked = 0;
    for case in 0..50 {
        let n = rng.random_range(1..=6usize);
        let k = rng.random_range(2..=8usize);
        let s = randn(n, k, &mut rng) * 2.0;
        let t = randn(n, k, &mut rng) * 4.0;
        let labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..k)).collect();
        let temp = rng.random_range(0.5..10.0);
        let alpha = if case % 5 == 0 { 1.0 } else { rng.random_range(0.0..1.0) };
        let (_, g) = kd_loss_and_grad(s.view(), t.view(), &labels, temp, alpha).unwrap();
        for ((i, j), &a) in g.indexed_iter() {
            let f = |d: f64| {
                let mut ss = s.clone();
                ss[[i, j]] += d;
                kd_loss(ss.view(), t.view(), &labels, temp, alpha).unwrap()
            };
            worst_kd = worst_kd.max(rel_err(a, (f(FD_STEP) - f(-FD_STEP)) / (2.0 * FD_STEP)));
            kd_checked += 1;
        }
    }
    let pass = worst_mlp < 1e-4 && worst_kd < 1e-4;
    (
        pass,
        format!(
            "50 MLPs: worst rel err {worst_mlp:.2e} over {checked} params ({skipped} skipped at ReLU kinks); \
             50 KD fixtures: worst {worst_kd:.2e} over {kd_checked} partials (< 1e-4)"
        ),
    )
}

// ---------------------------------------------------------------- 2

fn tempered_set(seed: u64) -> LogitSet {
    let mut rng = stream(seed, Stream::Data);
    let n = rng.random_range(20..=500usize);
    let k = rng.random_range(2..=10usize);
    let scale = rng.random_range(0.5..8.0);
    let t_true = rng.random_range(0.5f64.ln()..3.0f64.ln()).exp();
    let logits = randn(n, k, &mut rng) * scale;
    let p = softmax(logits.view(), t_true).unwrap();
    let labels = p
        .rows()
        .into_iter()
        .map(|row| {
            let u: f64 = rng.random();
            let mut acc = 0.0;
            row.iter()
                .position(|&q| {
                    acc += q;
                    u < acc
                })
                .unwrap_or(k - 1)
        })
        .collect();
    LogitSet::new(logits, labels).unwrap()
}

fn criterion_fit_oracle() -> (bool, String) {
    let opts = FitOptions::default();
    let (lo, hi) = (opts.t_min.ln(), opts.t_max.ln());
    let mut worst = 0.0f64;
    let mut t_range = (f64::INFINITY, 0.0f64);
    for seed in 0..20 {
        let set = tempered_set(seed);
        let fit = fit_temperature(&set, &opts).unwrap();
        let grid = (0..20_000)
            .map(|i| (lo + (hi - lo) * i as f64 / 19_999.0).exp())
            .map(|t| (nll(&set, t).unwrap(), t))
            .min_by(|a, b| a.0.total_cmp(&b.0))
            .unwrap()
            .1;
        worst = worst.max((fit.temperature - grid).abs());
        t_range = (t_range.0.min(fit.temperature), t_range.1.max(fit.temperature));
    }
    (
        worst < 1e-3,
        format!(
            "20 sets, T* in [{:.3}, {:.3}]: max |T_golden - T_grid| = {worst:.2e} (< 1e-3)",
            t_range.0, t_range.1
        ),
    )
}

// ---------------------------------------------------------------- 3

fn criterion_ece_fixture() -> (bool, String) {
    let h = ReliabilityHistogram::from_predictions(
        [(0.9, true), (0.8, false), (0.6, true), (0.55, false)],
        2,
    )
    .unwrap();
    let e = ece(&h).unwrap();
    ((e - 0.2125).abs() <= 1e-12, format!("ECE = {e:.15} (0.2125 ± 1e-12)"))
}

// ---------------------------------------------------------------- 4, 5

struct FleetRun {
    temperature: f64,
    nll_before: f64,
    nll_after: f64,
    ece_before: f64,
    ece_after: f64,
    train_loss: f64,
}

/// Width-1024 teachers memorising 3000 noisy samples, each with its own data and init seed.
fn teacher_fleet() -> Vec<FleetRun> {
    let spec = SweepSpec { teacher_widths: vec![1024], ..Default::default() };
    (0..20u64)
        .map(|seed| {
            let data = SyntheticSpec { samples: 5000, seed, ..Default::default() }
                .generate()
                .unwrap()
                .dataset;
            let fractions = SplitFractions { train: 0.6, validation: 0.3, test: 0.1 };
            let splits = split(&data, fractions, seed).unwrap();
            let teacher = train_and_calibrate_teacher(&spec, &splits, 1024, seed).unwrap();
            let val = calikd::distill::logit_set(&teacher.model, &splits.validation).unwrap();
            let report = calibration_report(&val, &teacher.fit, spec.bins).unwrap();
            FleetRun {
                temperature: teacher.fit.temperature,
                nll_before: teacher.fit.nll_before,
                nll_after: teacher.fit.nll_after,
                ece_before: report.ece_before,
                ece_after: report.ece_after,
                train_loss: teacher.trace.final_loss().unwrap(),
            }
        })
        .collect()
}

fn criterion_ece_statistics(fleet: &[FleetRun]) -> (bool, String) {
    let n = fleet.len();
    let ece_down = fleet.iter().filter(|r| r.ece_after < r.ece_before).count();
    let t_up = fleet.iter().filter(|r| r.temperature > 1.0).count();
    let max_loss = fleet.iter().map(|r| r.train_loss).fold(0.0, f64::max);
    let mean = |f: fn(&FleetRun) -> f64| fleet.iter().map(f).sum::<f64>() / n as f64;
    let (t_lo, t_hi) = fleet
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(a, b), r| (a.min(r.temperature), b.max(r.temperature)));
    let near_zero = max_loss < 0.05;
    let pass = n >= 20 && near_zero && ece_down * 10 >= n * 9 && t_up * 10 >= n * 9;
    (
        pass,
        format!(
            "{n} teachers (final train loss <= {max_loss:.4}, near zero: {near_zero}): val ECE down in {ece_down}/{n}, \
             T > 1 in {t_up}/{n} (need >= 90%); T in [{t_lo:.3}, {t_hi:.3}], mean val ECE {:.4} -> {:.4}",
            mean(|r| r.ece_before),
            mean(|r| r.ece_after)
        ),
    )
}

fn criterion_nll(fleet: &[FleetRun], sweep_fits: &[CalibrationRecord]) -> (bool, String) {
    let mut pairs: Vec<(f64, f64)> = fleet.iter().map(|r| (r.nll_before, r.nll_after)).collect();
    pairs.extend(sweep_fits.iter().map(|c| (c.validation.nll_before, c.validation.nll_after)));
    let violations = pairs.iter().filter(|(b, a)| a > &(b + 1e-12)).count();
    let worst = pairs.iter().map(|(b, a)| a - b).fold(f64::NEG_INFINITY, f64::max);
    (
        violations == 0 && !pairs.is_empty(),
        format!(
            "{} fitted teachers ({} fleet + {} sweep): NLL(T*) <= NLL(1) + 1e-12 on the fit split in all; \
             max NLL(T*) - NLL(1) = {worst:.3e}",
            pairs.len(),
            fleet.len(),
            sweep_fits.len()
        ),
    )
}

// ---------------------------------------------------------------- 6

fn criterion_trend(report: &ReportOutput) -> (bool, String) {
    let largest = *report.baseline.iter().map(|b| &b.teacher_size).max().unwrap();
    let acc = |mode| {
        report
            .comparison
            .iter()
            .find(|r| r.teacher_size == largest && r.mode == mode)
            .unwrap()
            .student_accuracy
    };
    let (v, c) = (acc(KdMode::Vanilla), acc(KdMode::Calibrated));
    let a = c.mean >= v.mean;
    let b = report.cells_calibrated_ge_vanilla * 10 > report.cells * 6;
    (
        a && b,
        format!(
            "(a) teacher {largest}: calibrated {:.4} ± {:.4} vs vanilla {:.4} ± {:.4} -> {a}; \
             (b) calibrated >= vanilla in {}/{} cells (need > 60%) -> {b}; {}",
            c.mean,
            c.std,
            v.mean,
            v.std,
            report.cells_calibrated_ge_vanilla,
            report.cells,
            report.verdict
        ),
    )
}

// ---------------------------------------------------------------- 7

fn criterion_reductions() -> (bool, String) {
    let data =
        SyntheticSpec { samples: 1500, seed: 5, ..Default::default() }.generate().unwrap().dataset;
    let splits = split(&data, SplitFractions::default(), 5).unwrap();
    let (d, k) = (splits.train.dim(), splits.train.class_count());
    let cfg = TrainConfig { max_epochs: 8, seed: 3, ..Default::default() };
    let (teacher, _) = train(
        MlpModel::seeded(&mlp_dims(d, 128, 1, k), 1).unwrap(),
        &splits.train,
        &cfg,
        &TargetMode::Hard,
    )
    .unwrap();
    let fit = fit_temperature(
        &calikd::distill::logit_set(&teacher, &splits.validation).unwrap(),
        &FitOptions::default(),
    )
    .unwrap();
    let student = MlpModel::seeded(&mlp_dims(d, 16, 1, k), 2).unwrap();
    let (plain, plain_trace) =
        train(student.clone(), &splits.train, &cfg, &TargetMode::Hard).unwrap();
    let identical = KdMode::ALL.iter().all(|&mode| {
        let dc = DistillConfig { alpha: 0.0, kd_temperature: 4.0, mode, train: cfg.clone() };
        let out =
            distill_student(student.clone(), &teacher, &splits.train, &dc, Some(&fit)).unwrap();
        let same_bits = out.student.layers().iter().zip(plain.layers()).all(|(a, b)| {
            a.weights
                .iter()
                .chain(&a.bias)
                .zip(b.weights.iter().chain(&b.bias))
                .all(|(x, y)| x.to_bits() == y.to_bits())
        });
        same_bits && out.trace == plain_trace
    });

    let mut rng = stream(99, Stream::Data);
    let logits = randn(10_000, 10, &mut rng) * 6.0;
    let base = argmax_rows(logits.view());
    let temps = [0.05, 0.2, 0.7, 1.0, 1.3, 2.9, 7.5, 20.0];
    let invariant =
        temps.iter().all(|&t| argmax_rows(softmax(logits.view(), t).unwrap().view()) == base);
    (
        identical && invariant,
        format!(
            "alpha=0 student and trace bit-identical to plain training (both modes): {identical}; \
             argmax invariant on 10000 rows at {} temperatures: {invariant}",
            temps.len()
        ),
    )
}

// ---------------------------------------------------------------- 8

fn idx_header(magic: u32, dims: &[u32]) -> Vec<u8> {
    magic.to_be_bytes().into_iter().chain(dims.iter().flat_map(|d| d.to_be_bytes())).collect()
}

fn criterion_parsers() -> (bool, String) {
    let mut rng = stream(8, Stream::Data);
    let logits = Array2::from_shape_fn((5000, 10), |_| {
        let scale = [1e-4, 1.0, 30.0, 1e3][rng.random_range(0..4usize)];
        scale * {
            let v: f64 = StandardNormal.sample(&mut rng);
            v
        }
    });
    let labels = (0..5000).map(|_| rng.random_range(0..10)).collect();
    let set = LogitSet::new(logits, labels).unwrap();
    let back = logits_from_csv(&logits_to_csv(&set)).unwrap();
    let worst =
        back.logits().iter().zip(set.logits()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let round_trip = worst < 1e-7 && back.labels() == set.labels();

    let mut good = idx_header(0x0803, &[2, 3, 3]);
    good.extend([7u8; 18]);
    let wrong_magic = [&[0u8, 0, 0x0D, 0x03][..], &good[4..]].concat();
    type Case = (&'static str, Vec<u8>, fn(&Error) -> bool);
    let corpus: Vec<Case> = vec![
        ("wrong magic", wrong_magic, |e| matches!(e, Error::Format { .. })),
        ("garbage", b"GIF89a not an idx file".to_vec(), |e| matches!(e, Error::Format { .. })),
        ("empty", vec![], |e| matches!(e, Error::Truncated { .. })),
        ("truncated header", good[..9].to_vec(), |e| matches!(e, Error::Truncated { .. })),
        ("truncated payload", good[..good.len() - 3].to_vec(), |e| {
            matches!(e, Error::Truncated { .. })
        }),
        ("zero dimension", idx_header(0x0803, &[2, 0, 3]), |e| matches!(e, Error::Format { .. })),
        ("zero labels", idx_header(0x0801, &[0]), |e| matches!(e, Error::Format { .. })),
    ];
    let mut wrong = Vec::new();
    for (name, bytes, expected) in &corpus {
        match parse_idx(bytes) {
            Err(e) if expected(&e) => {}
            other => wrong.push(format!("{name}: {other:?}")),
        }
    }
    let parsed_good = parse_idx(&good).is_ok();
    (
        round_trip && wrong.is_empty() && parsed_good,
        format!(
            "logits CSV round trip max abs err {worst:.1e} (< 1e-7); IDX corpus {}/{} rejected with the expected class{}",
            corpus.len() - wrong.len(),
            corpus.len(),
            if wrong.is_empty() { String::new() } else { format!(" (wrong: {})", wrong.join("; ")) }
        ),
    )
}

// ---------------------------------------------------------------- 9

fn snapshot(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut files = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else if p.file_name().unwrap() != calikd_cli::artifacts::RUN_RECORD {
                files
                    .insert(p.strip_prefix(dir).unwrap().to_path_buf(), std::fs::read(&p).unwrap());
            }
        }
    }
    files
}

fn all_stages(config: &ExperimentConfig, out: &Path) -> PathBuf {
    let ctx = Context::new(config.clone(), out);
    let splits = config.load_splits().unwrap();
    ctx.write_config().unwrap();
    for &size in &config.teacher_sizes {
        for &seed in &config.seeds {
            commands::train_teacher(&ctx, &splits, size, seed).unwrap();
            commands::calibrate(&ctx, size, seed).unwrap();
            for mode in KdMode::ALL {
                commands::distill(&ctx, &splits, size, seed, mode).unwrap();
            }
        }
    }
    commands::report(&ctx).unwrap();
    commands::verify(&ctx, &splits).unwrap();
    ctx.layout.root().to_path_buf()
}

fn criterion_determinism(sweep_root: &Path, sweep_config: &ExperimentConfig) -> (bool, String) {
    let config = ExperimentConfig::resolve(
        None,
        &[
            "dataset.synthetic.samples=1200".into(),
            "teacher_sizes=[16,64]".into(),
            "seeds=[0,1]".into(),
            "train.max_epochs=6".into(),
        ],
    )
    .unwrap();
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let first = snapshot(&all_stages(&config, a.path()));
    let fresh = snapshot(&all_stages(&config, b.path()));
    let rerun = snapshot(&all_stages(&config, a.path()));
    // Re-reporting and re-verifying the full sweep must not change a byte either.
    let before = snapshot(sweep_root);
    let ctx = Context::new(sweep_config.clone(), sweep_root.parent().unwrap());
    commands::report(&ctx).unwrap();
    let after = snapshot(sweep_root);
    let pass = first == fresh && first == rerun && before == after;
    (
        pass,
        format!(
            "train-teacher/calibrate/distill/report/verify: {} artifacts identical across a fresh directory ({}) \
             and an in-place re-run ({}); full-sweep report re-run over {} files identical: {}",
            first.len(),
            first == fresh,
            first == rerun,
            before.len(),
            before == after
        ),
    )
}

fn main() {
    let args: Vec<String> = std::env::args().collect();
    if args.iter().any(|a| a == "--list") {
        println!("acceptance: test");
        return;
    }
    // `cargo test <filter>` passes the filter through; run only when it matches.
    if args.iter().skip(1).any(|a| !a.starts_with('-') && !"acceptance".contains(a.as_str())) {
        return;
    }
    let total = Instant::now();
    let mut lines = Vec::new();

    let mut l = run(1, "gradient oracle", false, criterion_gradients);
    within(&mut l, Duration::from_secs(30));
    lines.push(l);
    let mut l = run(2, "temperature-fit oracle", false, criterion_fit_oracle);
    within(&mut l, Duration::from_secs(10));
    lines.push(l);
    lines.push(run(3, "ECE hand fixture", false, criterion_ece_fixture));

    let fleet_start = Instant::now();
    let fleet = catch_unwind(teacher_fleet).unwrap_or_default();
    let fleet_time = fleet_start.elapsed();

    let sweep_out = tempfile::tempdir().unwrap();
    let sweep_config = ExperimentConfig::default();
    let sweep_start = Instant::now();
    let sweep = catch_unwind(AssertUnwindSafe(|| {
        let ctx = Context::new(sweep_config.clone(), sweep_out.path());
        let splits = sweep_config.load_splits().unwrap();
        ctx.write_config().unwrap();
        let jobs = std::thread::available_parallelism().map_or(1, |n| n.get());
        let report = commands::sweep(&ctx, &splits, jobs).unwrap();
        let fits: Vec<CalibrationRecord> = sweep_config
            .teacher_sizes
            .iter()
            .flat_map(|&s| sweep_config.seeds.iter().map(move |&seed| (s, seed)))
            .map(|(s, seed)| {
                let path = ctx.layout.calibrate_dir(s, seed).join(commands::CALIBRATION);
                serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
            })
            .collect();
        (report, fits, ctx.layout.root().to_path_buf())
    }));
    let sweep_time = sweep_start.elapsed();

    let mut l = run(4, "NLL improvement guarantee", false, || {
        let fits = sweep.as_ref().map(|s| s.1.clone()).unwrap_or_default();
        criterion_nll(&fleet, &fits)
    });
    l.elapsed += fleet_time;
    lines.push(l);
    let mut l = run(5, "ECE improvement (statistical)", false, || {
        assert!(!fleet.is_empty(), "teacher fleet failed to train");
        criterion_ece_statistics(&fleet)
    });
    l.elapsed += fleet_time;
    within(&mut l, Duration::from_secs(15 * 60));
    lines.push(l);
    let mut l = run(6, "trend reproduction (soft)", true, || match &sweep {
        Ok((report, _, _)) => criterion_trend(report),
        Err(_) => (false, "sweep failed".into()),
    });
    l.elapsed += sweep_time;
    within(&mut l, Duration::from_secs(30 * 60));
    lines.push(l);
    lines.push(run(7, "reduction identities", false, criterion_reductions));
    lines.push(run(8, "round-trip and parser suites", false, criterion_parsers));
    lines.push(run(9, "determinism", false, || match &sweep {
        Ok((_, _, root)) => criterion_determinism(root, &sweep_config),
        Err(_) => (false, "sweep failed".into()),
    }));

    println!();
    let mut hard_failures = 0;
    for l in &lines {
        let tag = match (l.pass, l.soft) {
            (true, _) => "PASS",
            (false, false) => "FAIL",
            (false, true) => "FAIL (soft)",
        };
        if !l.pass && !l.soft {
            hard_failures += 1;
        }
        println!("{tag} [{}] {}: {} [{:.1} s]", l.id, l.name, l.detail, l.elapsed.as_secs_f64());
    }
    println!(
        "acceptance: {} of {} criteria pass, total {:.0} s",
        lines.iter().filter(|l| l.pass).count(),
        lines.len(),
        total.elapsed().as_secs_f64()
    );
    if hard_failures > 0 {
        std::process::exit(1);
    }
}
