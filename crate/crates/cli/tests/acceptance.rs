//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use forcegrip_cli::pipeline::{evaluate_policy, generate_demos, train_policy};
use forcegrip_cli::{Overrides, RunConfig};
use forcegrip_core::control::{force_feedback_gripper_control, ControllerConfig, GripperMode, Termination};
use forcegrip_core::demo::Demonstration;
use forcegrip_core::geometry::triangulate;
use forcegrip_core::geometry::{
    decode_rotation6d, encode_rotation6d, kabsch, project, CameraModel, Mat3, RigidTransform, Vec3,
};
use forcegrip_core::plant::{reset_pose, Plant, PlantConfig, Scene, TaskKind, TaskSpec};
use forcegrip_core::policy::{
    random_tokens, temporal_aggregate, tokenize, Action, Frame, ObservationWindow, PolicyConfig, PolicyNet, TrainConfig,
};
use forcegrip_core::retarget::{
    gripper_state, hand_to_pose, keypoints_to_pose, pose_to_keypoints, HandFrame, KeypointLayout, HAND_KEYPOINTS,
    INDEX_TIP, THUMB_TIP,
};
use forcegrip_core::seed::rng_for;
use forcegrip_core::tactile::{fit_calibration, CalibrationCurve};
use rand::Rng;

type Outcome = Result<String, String>;

fn check(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(elapsed: Duration, limit: Duration, what: &str) -> Result<(), String> {
    check(elapsed < limit, || {
        format!("{what} took {elapsed:.2?}, limit {limit:?}")
    })
}

fn random_rotation(rng: &mut impl Rng) -> Mat3 {
    let axis = Vec3::new(
        rng.random_range(-1.0..1.0),
        rng.random_range(-1.0..1.0),
        rng.random_range(-1.0..1.0),
    );
    let axis = if axis.norm() < 1e-3 { Vec3::z() } else { axis };
    *RigidTransform::from_axis_angle(axis, rng.random_range(-3.1..3.1), Vec3::zeros()).rotation()
}

fn random_vec(rng: &mut impl Rng, r: f64) -> Vec3 {
    Vec3::new(
        rng.random_range(-r..r),
        rng.random_range(-r..r),
        rng.random_range(-r..r),
    )
}

fn geometry() -> Outcome {
    let start = Instant::now();
    let mut rng = rng_for(101, "acceptance-geometry", 0);

    let mut worst_tri: f64 = 0.0;
    for _ in 0..1000 {
        let target = Vec3::new(0.5, 0.0, 0.1) + random_vec(&mut rng, 0.05);
        let eye = |side: f64, rng: &mut rand_chacha::ChaCha8Rng| {
            Vec3::new(1.2, side * rng.random_range(0.3..0.6), rng.random_range(0.4..0.8)) + random_vec(rng, 0.1)
        };
        let (ea, eb) = (eye(1.0, &mut rng), eye(-1.0, &mut rng));
        let a = CameraModel::look_at(rng.random_range(400.0..800.0), 320.0, 240.0, ea, target)
            .map_err(|e| e.to_string())?;
        let b = CameraModel::look_at(rng.random_range(400.0..800.0), 320.0, 240.0, eb, target)
            .map_err(|e| e.to_string())?;
        let p = Vec3::new(0.5, 0.0, 0.1) + random_vec(&mut rng, 0.25);
        let pa = project(&a, &p).map_err(|e| e.to_string())?;
        let pb = project(&b, &p).map_err(|e| e.to_string())?;
        let q = triangulate(&a, &pa, &b, &pb).map_err(|e| e.to_string())?;
        worst_tri = worst_tri.max((q - p).norm());
    }
    check(worst_tri < 1e-6, || format!("triangulation error {worst_tri:.3e} m"))?;

    let mut worst_kabsch: f64 = 0.0;
    for _ in 0..100 {
        let truth = RigidTransform::new(random_rotation(&mut rng), random_vec(&mut rng, 1.0)).unwrap();
        let src: Vec<Vec3> = (0..8).map(|_| random_vec(&mut rng, 0.5)).collect();
        let dst: Vec<Vec3> = src.iter().map(|p| truth.apply(p)).collect();
        let est = kabsch(&src, &dst).map_err(|e| e.to_string())?;
        let err = (est.rotation() - truth.rotation())
            .abs()
            .max()
            .max((est.translation() - truth.translation()).abs().max());
        worst_kabsch = worst_kabsch.max(err);
    }
    check(worst_kabsch < 1e-9, || format!("kabsch error {worst_kabsch:.3e}"))?;

    let mut worst_6d: f64 = 0.0;
    for _ in 0..1000 {
        let r = random_rotation(&mut rng);
        let back = decode_rotation6d(&encode_rotation6d(&r)).map_err(|e| e.to_string())?;
        worst_6d = worst_6d.max((back - r).abs().max());
    }
    check(worst_6d < 1e-9, || format!("6D codec error {worst_6d:.3e}"))?;
    within(start.elapsed(), Duration::from_secs(5), "geometry suite")?;
    Ok(format!(
        "triangulation {worst_tri:.1e} m, kabsch {worst_kabsch:.1e}, 6D {worst_6d:.1e}, {:.2?}",
        start.elapsed()
    ))
}

fn hand_with_tips(index: Vec3, thumb: Vec3) -> HandFrame {
    let mut pts: Vec<Vec3> = (0..HAND_KEYPOINTS)
        .map(|i| Vec3::new(0.01 * i as f64, 0.02, -0.1))
        .collect();
    pts[INDEX_TIP] = index;
    pts[THUMB_TIP] = thumb;
    HandFrame::new(pts, 0.0).unwrap()
}

fn retargeting() -> Outcome {
    let mut rng = rng_for(102, "acceptance-retarget", 0);
    let layout = KeypointLayout::default_gripper();
    let r0 = *reset_pose().rotation();
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let pose = RigidTransform::new(random_rotation(&mut rng), random_vec(&mut rng, 0.5)).unwrap();
        let pts = pose_to_keypoints(&pose, &layout);
        let back = keypoints_to_pose(&pts, &layout, &r0).map_err(|e| e.to_string())?;
        worst = worst.max((back.rotation() - pose.rotation()).abs().max());
        worst = worst.max((back.translation() - pose.translation()).abs().max());
        let again = pose_to_keypoints(&back, &layout);
        for (a, b) in again.iter().zip(&pts) {
            worst = worst.max((a - b).norm());
        }
    }
    check(worst < 1e-9, || format!("pose/keypoint inverse error {worst:.3e}"))?;

    let initial = RigidTransform::new(random_rotation(&mut rng), random_vec(&mut rng, 0.5)).unwrap();
    let frame0 = hand_with_tips(Vec3::new(0.4, 0.03, 0.2), Vec3::new(0.4, -0.03, 0.2));
    let p0 = hand_to_pose(&frame0, &frame0, &initial).map_err(|e| e.to_string())?;
    check(p0.rotation() == initial.rotation(), || {
        "frame-0 orientation is not the initial orientation".into()
    })?;
    check(*p0.translation() == Vec3::new(0.4, 0.0, 0.2), || {
        format!("frame-0 position {:?}", p0.translation())
    })?;

    for (gap, closed) in [(0.05, true), (0.07, false), (0.12, false)] {
        let f = hand_with_tips(Vec3::new(0.3, gap / 2.0, 0.1), Vec3::new(0.3, -gap / 2.0, 0.1));
        check(gripper_state(&f) == closed, || {
            format!("tip gap {gap} m gave closed={}", !closed)
        })?;
    }
    Ok(format!(
        "inverse error {worst:.1e}; frame-0 identity exact; 7 cm rule 0.05/0.07/0.12 ok"
    ))
}

fn linear_plant(s: f64, g0: f64, crush: f64, rate: f64) -> Plant {
    let mut spec = TaskSpec::default_for(TaskKind::FragilePickPlace);
    spec.stiffness = s;
    spec.crush_force = crush;
    spec.contact_closure_min = g0;
    spec.contact_closure_max = g0;
    let mut scene = Scene::sample(&spec, 0).unwrap();
    let at = Vec3::new(0.5, 0.0, spec.rest_height);
    scene.object.initial_pose = RigidTransform::from_translation(at);
    let cfg = PlantConfig {
        sensor_noise_sigma: 0.0,
        max_closure_rate: rate,
        ..spec.plant_config()
    };
    Plant::new(scene, cfg, reset_pose().with_translation(at), 0)
}

fn settle_at(plant: &mut Plant, g: f64) {
    let eef = plant.state().eef_pose;
    for _ in 0..1000 {
        if plant.state().closure == g {
            break;
        }
        plant.step(g, &eef);
    }
}

fn controller() -> Outcome {
    let start = Instant::now();
    let cfg = ControllerConfig::default();
    check(cfg.k == 0.001 && cfg.epsilon == 5.0, || {
        "default constants differ from k=0.001, eps=5".into()
    })?;

    // k·s = 1: g0 = 0.2, g = 0.2, F̂ = 100 → Δg = 0.1, one iteration
    let mut plant = linear_plant(1000.0, 0.2, 150.0, 1.0);
    settle_at(&mut plant, 0.2);
    let (state, trace) = force_feedback_gripper_control(&mut plant, 100.0, &cfg).map_err(|e| e.to_string())?;
    check(
        trace.steps.len() == 1 && trace.termination == Termination::Converged,
        || format!("k·s=1 took {} iterations ({:?})", trace.steps.len(), trace.termination),
    )?;
    check((state.measured_force - 100.0).abs() <= cfg.epsilon, || {
        format!("final force {}", state.measured_force)
    })?;
    check((trace.steps[0].delta - 0.1).abs() < 1e-12, || {
        format!("Δg = {}", trace.steps[0].delta)
    })?;

    for (s, target) in [(200.0, 100.0), (500.0, 100.0), (1500.0, 60.0)] {
        let mut plant = linear_plant(s, 0.2, 1e6, 1.0);
        settle_at(&mut plant, 0.21);
        let tight = ControllerConfig {
            epsilon: 1e-6,
            max_inner_iters: 200,
            ..cfg.clone()
        };
        let (_, trace) = force_feedback_gripper_control(&mut plant, target, &tight).map_err(|e| e.to_string())?;
        let ratio = (1.0 - 0.001 * s).abs();
        check(trace.steps.len() >= 2 && trace.converged(), || {
            format!("s={s}: {} steps", trace.steps.len())
        })?;
        for st in &trace.steps {
            let (before, after) = ((target - st.force).abs(), (target - st.force_after).abs());
            check((after - ratio * before).abs() < 1e-9 * target, || {
                format!("s={s}: error {before} -> {after}, expected ratio {ratio}")
            })?;
        }
    }

    // hold at 90, then the contact point jumps; the loop must re-converge within the cap
    let mut plant = linear_plant(1000.0, 0.2, 150.0, 1.0);
    settle_at(&mut plant, 0.2);
    force_feedback_gripper_control(&mut plant, 90.0, &cfg).map_err(|e| e.to_string())?;
    plant.set_contact_closure(0.23);
    let (state, trace) = force_feedback_gripper_control(&mut plant, 90.0, &cfg).map_err(|e| e.to_string())?;
    check(trace.converged() && trace.steps.len() <= 50, || {
        format!(
            "disturbance: {:?} after {} iterations",
            trace.termination,
            trace.steps.len()
        )
    })?;
    check((state.measured_force - 90.0).abs() <= cfg.epsilon, || {
        format!("disturbance: force {}", state.measured_force)
    })?;
    let iters = trace.steps.len();
    within(start.elapsed(), Duration::from_secs(1), "controller suite")?;
    Ok(format!(
        "deadbeat 1 iteration; contraction |1-ks| exact; disturbance re-converged in {iters}; {:.2?}",
        start.elapsed()
    ))
}

fn calibration() -> Outcome {
    let mut rng = rng_for(104, "acceptance-calibration", 0);
    for trial in 0..1000 {
        let n = rng.random_range(2..40);
        let pairs: Vec<(f64, f64)> = (0..n)
            .map(|_| (rng.random_range(0.0..300.0), rng.random_range(-1.0..6.0)))
            .collect();
        let fit = match fit_calibration(&pairs) {
            Ok(f) => f,
            Err(forcegrip_core::Error::Degenerate { .. }) => continue,
            Err(e) => return Err(format!("trial {trial}: {e}")),
        };
        let k = fit.curve.knots();
        check(k.windows(2).all(|w| w[1].0 > w[0].0 && w[1].1 >= w[0].1), || {
            format!("trial {trial}: knots not monotone")
        })?;
        for i in 0..50 {
            let (a, b) = (i as f64 * 7.0, i as f64 * 7.0 + 3.5);
            check(fit.curve.norm_to_newton(b) >= fit.curve.norm_to_newton(a), || {
                format!("trial {trial}: curve decreases")
            })?;
        }
    }

    let pairs: Vec<(f64, f64)> = (0..=25).map(|i| (8.0 * i as f64, 0.02 * 8.0 * i as f64)).collect();
    let fit = fit_calibration(&pairs).map_err(|e| e.to_string())?;
    check(fit.max_residual < 1e-9, || {
        format!("linear residual {:.3e}", fit.max_residual)
    })?;

    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let mut knots = vec![(0.0, 0.0)];
        for _ in 0..rng.random_range(1..10) {
            let &(x, y) = knots.last().unwrap();
            knots.push((x + rng.random_range(1.0..50.0), y + rng.random_range(0.01..1.0)));
        }
        let curve = CalibrationCurve::from_knots(knots.clone()).map_err(|e| e.to_string())?;
        let top = knots.last().unwrap().0 * 1.2;
        for _ in 0..50 {
            let x = rng.random_range(0.0..top);
            worst = worst.max((curve.newton_to_norm(curve.norm_to_newton(x)) - x).abs());
        }
    }
    check(worst < 1e-9, || format!("round trip error {worst:.3e}"))?;
    Ok(format!(
        "PAVA monotone in 1000 trials; linear residual {:.1e}; round trip {worst:.1e}",
        fit.max_residual
    ))
}

fn demo(spec: &TaskSpec, seed: u64) -> Demonstration {
    forcegrip_core::control::scripted_expert(
        spec,
        seed,
        &KeypointLayout::default_gripper(),
        &ControllerConfig::default(),
    )
    .unwrap()
    .demo
}

fn policy() -> Outcome {
    let start = Instant::now();
    let tiny = PolicyConfig {
        history: 2,
        horizon: 3,
        width: 8,
        depth: 2,
        heads: 2,
        ffn_mult: 1,
        robot_points: 3,
        object_points: 2,
    };
    let mut rng = rng_for(105, "acceptance-policy", 0);
    let mut net = PolicyNet::new(tiny.clone(), 3).map_err(|e| e.to_string())?;
    for v in net.params_mut() {
        *v += rng.random_range(-0.05..0.05);
    }
    let tokens = random_tokens(&tiny, &mut rng);
    let target: Vec<f64> = (0..tiny.output_len()).map(|_| rng.random_range(-1.0..1.0)).collect();
    let (_, grad) = net.loss_and_gradient(&tokens, &target).map_err(|e| e.to_string())?;
    let loss = |n: &PolicyNet| -> f64 {
        let out = n.forward(&tokens).unwrap().0;
        out.iter().zip(&target).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / out.len() as f64
    };
    let h = 1e-3;
    let mut worst_rel: f64 = 0.0;
    for (i, &g) in grad.iter().enumerate() {
        let orig = net.params()[i];
        let mut at = |d: f64| {
            net.params_mut()[i] = orig + d;
            loss(&net)
        };
        let fd = (8.0 * (at(h) - at(-h)) - (at(2.0 * h) - at(-2.0 * h))) / (12.0 * h);
        net.params_mut()[i] = orig;
        worst_rel = worst_rel.max((fd - g).abs() / (fd.abs() + g.abs()).max(1e-6));
    }
    check(worst_rel < 1e-4, || format!("gradient relative error {worst_rel:.3e}"))?;

    let spec = TaskSpec::default_for(TaskKind::FragilePickPlace);
    let tc = TrainConfig {
        epochs: 100_000,
        max_steps: 2000,
        all_offsets: false,
        ..Default::default()
    };
    let net = PolicyNet::new(PolicyConfig::new(4, 4), 0).map_err(|e| e.to_string())?;
    let (_, report) = forcegrip_core::policy::train(net, &[demo(&spec, 1)], &tc).map_err(|e| e.to_string())?;
    check(report.steps <= 2000 && report.final_loss < 1e-3, || {
        format!("overfit MSE {:.3e} after {} steps", report.final_loss, report.steps)
    })?;

    let a = Action {
        points: (0..4)
            .map(|i| Vec3::new(0.1 * i as f64 + 0.3, -0.17, 0.2 / 3.0))
            .collect(),
        gripper: 0.7,
        force: 91.3,
    };
    for decay in [0.0, 0.5, 1.7] {
        for k in 1..=10 {
            let preds: Vec<(usize, &Action)> = (0..k).map(|age| (age, &a)).collect();
            let out = temporal_aggregate(&preds, decay).map_err(|e| e.to_string())?;
            check(out == a, || {
                format!("constant input changed under averaging (decay {decay}, {k} chunks)")
            })?;
        }
    }

    let mut combos = 0;
    for n in [3, 4, 7] {
        for m in [1, 4] {
            for l in [1, 3] {
                let frame = Frame {
                    robot: vec![Vec3::zeros(); n],
                    object: vec![Vec3::zeros(); m],
                    gripper: 1.0,
                    force: 2.0,
                };
                let window = ObservationWindow::from_frames(&[frame], 0, l).map_err(|e| e.to_string())?;
                let t = tokenize(&window).map_err(|e| e.to_string())?;
                check(
                    t.count == n + m + 2 && t.dim == 3 * l && t.data.len() == (n + m + 2) * 3 * l,
                    || format!("N={n} M={m} L={l}: {}x{}", t.count, t.dim),
                )?;
                combos += 1;
            }
        }
    }
    check(combos == 12, || format!("{combos} shape combinations"))?;
    Ok(format!(
        "gradient rel {worst_rel:.1e}; overfit MSE {:.2e} in {} steps; averaging exact; 12 token shapes; {:.1?}",
        report.final_loss,
        report.steps,
        start.elapsed()
    ))
}

fn reference_config() -> RunConfig {
    RunConfig::load(
        None,
        &Overrides {
            seed: Some(0),
            out: Some(std::env::temp_dir().join("forcegrip-acceptance-unused")),
            ..Default::default()
        },
    )
    .unwrap()
}

struct EndToEnd {
    success: usize,
    crushes: usize,
    binary_crushes: usize,
    elapsed: Duration,
}

fn run_end_to_end(cfg: &RunConfig, mask: bool) -> Result<EndToEnd, String> {
    let start = Instant::now();
    let runs = generate_demos(cfg, 30).map_err(|e| e.to_string())?;
    let demos: Vec<Demonstration> = runs.into_iter().map(|r| r.demo).collect();
    let (policy, _) = train_policy(cfg, &demos, mask).map_err(|e| e.to_string())?;
    let (ff, _) = evaluate_policy(cfg, &policy, 10, GripperMode::ForceFeedback).map_err(|e| e.to_string())?;
    let binary_crushes = if mask {
        0
    } else {
        evaluate_policy(cfg, &policy, 10, GripperMode::Binary)
            .map_err(|e| e.to_string())?
            .0
            .crush_count
    };
    Ok(EndToEnd {
        success: ff.successes,
        crushes: ff.crush_count,
        binary_crushes,
        elapsed: start.elapsed(),
    })
}

fn end_to_end(unmasked: &Result<EndToEnd, String>) -> Outcome {
    let r = unmasked.as_ref().map_err(Clone::clone)?;
    let spec = &reference_config().spec;
    check(spec.crush_force == 150.0 && spec.slip_force == 50.0, || {
        "reference task is not crush 150 / slip 50".into()
    })?;
    check(r.success >= 9 && r.crushes == 0, || {
        format!("success {}/10 with {} crushes", r.success, r.crushes)
    })?;
    check(r.binary_crushes >= 8, || {
        format!("binary ablation crushed {}/10", r.binary_crushes)
    })?;
    within(r.elapsed, Duration::from_secs(600), "end-to-end run")?;
    Ok(format!(
        "success {}/10, crushes {}; binary crushes {}/10; {:.0?}",
        r.success, r.crushes, r.binary_crushes, r.elapsed
    ))
}

fn force_masking(unmasked: &Result<EndToEnd, String>) -> Outcome {
    let base = unmasked.as_ref().map_err(Clone::clone)?;
    let masked = run_end_to_end(&reference_config(), true)?;
    let (u, m) = (base.success as f64 / 10.0, masked.success as f64 / 10.0);
    check(u - m <= 0.10 + 1e-12, || format!("masked {m:.1} vs unmasked {u:.1}"))?;
    Ok(format!("masked success {:.1} vs unmasked {:.1}", m, u))
}

fn pipeline_run(root: &Path) -> Result<PathBuf, String> {
    let cfg = root.join("run.toml");
    std::fs::write(
        &cfg,
        "seed = 2024\noutput_dir = \"out\"\ndemos = 4\nepisodes = 3\n[train]\nepochs = 2\n",
    )
    .map_err(|e| e.to_string())?;
    for args in [&["gen-demos"][..], &["train"], &["eval"], &["eval", "--binary"]] {
        let out = Command::new(env!("CARGO_BIN_EXE_forcegrip"))
            .arg("--config")
            .arg(&cfg)
            .args(args)
            .output()
            .map_err(|e| e.to_string())?;
        check(out.status.success(), || {
            format!("{args:?} failed: {}", String::from_utf8_lossy(&out.stderr))
        })?;
    }
    Ok(root.join("out"))
}

fn files_under(dir: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push(p.strip_prefix(dir).unwrap().to_path_buf());
            }
        }
    }
    out.sort();
    out
}

fn determinism() -> Outcome {
    let (a, b) = (
        tempfile::tempdir().map_err(|e| e.to_string())?,
        tempfile::tempdir().map_err(|e| e.to_string())?,
    );
    let (oa, ob) = (pipeline_run(a.path())?, pipeline_run(b.path())?);
    let (fa, fb) = (files_under(&oa), files_under(&ob));
    check(fa == fb, || format!("file sets differ: {fa:?} vs {fb:?}"))?;
    for kind in [
        "demos/demo_0000.jsonl",
        "model.fgp",
        "eval/report.json",
        "eval-binary/report.json",
    ] {
        check(fa.contains(&PathBuf::from(kind)), || format!("missing {kind}"))?;
    }
    for f in &fa {
        let (x, y) = (std::fs::read(oa.join(f)).unwrap(), std::fs::read(ob.join(f)).unwrap());
        check(x == y, || format!("{} differs between runs", f.display()))?;
    }
    Ok(format!("{} output files bytewise identical across two runs", fa.len()))
}

fn main() {
    let mut failed = 0;
    let mut report = |id: usize, name: &str, outcome: Outcome| match outcome {
        Ok(detail) => println!("PASS [{id}] {name}: {detail}"),
        Err(why) => {
            failed += 1;
            println!("FAIL [{id}] {name}: {why}");
        }
    };
    report(1, "geometry", geometry());
    report(2, "retargeting", retargeting());
    report(3, "controller", controller());
    report(4, "calibration", calibration());
    report(5, "policy", policy());
    let unmasked = run_end_to_end(&reference_config(), false);
    report(6, "end-to-end force-sensitive pick-place", end_to_end(&unmasked));
    report(7, "force masking", force_masking(&unmasked));
    report(8, "determinism", determinism());
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
    println!("all 8 acceptance criteria passed");
}
