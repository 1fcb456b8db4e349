mod common;

use common::*;
use rand::Rng;
use skewsplat::backward::render_backward;
use skewsplat::camera::KernelMode;
use skewsplat::forward::{render_forward, RenderConfig};
use skewsplat_oracles::dual::Dual;
use skewsplat_oracles::reference::{render, RefGaussian};

#[test]
fn finite_difference_check_on_random_scenes() {
    let mut total = GradCheck::default();
    for seed in 0..10 {
        let mut r = rng(1000 + seed);
        let n = r.random_range(3..=6);
        let scene = random_scene(&mut r, n, 1, true);
        let view = test_view(&mut r, 8, 8);
        let target = random_target(&mut r, &view);
        total.merge(gradient_check(&scene, &view, &RenderConfig::default(), &target));
    }
    assert!(
        total.pass_rate() >= 0.98,
        "{} of {} passed; failures: {:?}",
        total.passed,
        total.total,
        total.worst
    );
}

#[test]
fn zero_upstream_gradient_gives_zero() {
    let mut r = rng(7);
    let scene = random_scene(&mut r, 5, 1, true);
    let view = test_view(&mut r, 8, 8);
    let cfg = RenderConfig::default();
    let frame = render_forward(&scene, &view, &cfg).unwrap();
    let g = render_backward(&scene, &view, &cfg, &frame, &vec![0.0; 8 * 8 * 3]).unwrap();
    for p in &g.grads {
        assert!(p.d_mu.iter().chain(&p.d_beta).chain(&p.d_rot).all(|v| *v == 0.0));
        assert!(p.d_sh.iter().flatten().all(|v| *v == 0.0));
    }
    assert!(g.g_z.iter().chain(&g.g_uv).all(|v| *v == 0.0));
}

#[test]
fn mismatched_frame_is_rejected() {
    let mut r = rng(8);
    let scene = random_scene(&mut r, 3, 0, true);
    let view = test_view(&mut r, 8, 8);
    let cfg = RenderConfig::default();
    let frame = render_forward(&scene, &view, &cfg).unwrap();
    let mut other = scene.clone();
    other.primitives[0].mu[0] += 0.01;
    assert!(render_backward(&other, &view, &cfg, &frame, &vec![1.0; 192]).is_err());
}

#[test]
fn descent_step_decreases_loss() {
    let mut r = rng(11);
    let scene = random_scene(&mut r, 1, 0, true);
    let view = test_view(&mut r, 8, 8);
    let target = random_target(&mut r, &view);
    let cfg = RenderConfig::default();
    let frame = render_forward(&scene, &view, &cfg).unwrap();
    let (l0, d) = sq_loss(&frame.color.data, &target);
    let g = render_backward(&scene, &view, &cfg, &frame, &d).unwrap();
    for lr in [1e-3, 1e-4, 1e-5] {
        let mut s = scene.clone();
        for p in Param::all(s.primitives[0].sh.len()) {
            *p.get_mut(&mut s.primitives[0]) -= lr * p.grad(&g.grads[0]);
        }
        let l1 = sq_loss(&render_forward(&s, &view, &cfg).unwrap().color.data, &target).0;
        assert!(l1 < l0, "lr {lr}: {l1} >= {l0}");
    }
}

/// Exact derivative of the reference renderer's loss with respect to one
/// scalar, via forward-mode dual numbers.
fn reference_derivative(
    gs: &[RefGaussian<f64>],
    cam: &skewsplat_oracles::reference::RefCamera,
    bg: [f64; 3],
    target: &[f64],
    dilation: f64,
    seed: impl Fn(&mut RefGaussian<Dual>),
    prim: usize,
) -> f64 {
    let lift = |v: f64| Dual { v, d: 0.0 };
    let mut dual: Vec<RefGaussian<Dual>> = gs
        .iter()
        .map(|g| RefGaussian {
            mean: g.mean.map(lift),
            log_scale: g.log_scale.map(lift),
            quat: g.quat.map(lift),
            sh: g.sh.iter().map(|c| c.map(lift)).collect(),
            opacity_logit: lift(g.opacity_logit),
        })
        .collect();
    seed(&mut dual[prim]);
    let img = render(&dual, cam, dilation, bg);
    img.iter().zip(target).map(|(p, t)| 2.0 * (p.v - t) * p.d).sum()
}

#[test]
fn symmetric_case_matches_reference_backward() {
    for seed in 0..5 {
        let mut r = rng(500 + seed);
        let scene = random_scene(&mut r, 4, 1, false);
        let view = test_view(&mut r, 8, 8);
        let target = random_target(&mut r, &view);
        let cfg = RenderConfig::default();
        let frame = render_forward(&scene, &view, &cfg).unwrap();
        let (_, d) = sq_loss(&frame.color.data, &target);
        let g = render_backward(&scene, &view, &cfg, &frame, &d).unwrap();
        let gs = to_reference(&scene);
        let cam = reference_camera(&view);
        let bg = scene.background;
        let s = cfg.project.dilation;
        let mut skew_grad_seen = false;
        for i in 0..scene.len() {
            let pg = &g.grads[i];
            let close = |a: f64, b: f64, what: &str| {
                assert!((a - b).abs() <= 1e-6 * (1.0 + b.abs()), "scene {seed} prim {i} {what}: {a} vs {b}");
            };
            for k in 0..3 {
                let dm = reference_derivative(&gs, &cam, bg, &target, s, |g| g.mean[k].d = 1.0, i);
                close(pg.d_mu[k], dm, "mu");
                let ds = reference_derivative(&gs, &cam, bg, &target, s, |g| g.log_scale[k].d = 1.0, i);
                close(pg.d_log_scale[k], ds, "scale");
            }
            for k in 0..4 {
                let dq = reference_derivative(&gs, &cam, bg, &target, s, |g| g.quat[k].d = 1.0, i);
                close(pg.d_rot[k], dq, "rot");
            }
            let dl = reference_derivative(&gs, &cam, bg, &target, s, |g| g.opacity_logit.d = 1.0, i);
            close(pg.d_opacity_logits[0] + pg.d_opacity_logits[1], dl, "opacity");
            skew_grad_seen |= pg.d_beta.iter().any(|v| *v != 0.0);
        }
        assert!(skew_grad_seen, "skew gradient should not vanish at zero skew");
    }
}

#[test]
fn gaussian_mode_freezes_skew() {
    let mut r = rng(21);
    let scene = random_scene(&mut r, 4, 0, true);
    let view = test_view(&mut r, 8, 8);
    let target = random_target(&mut r, &view);
    let mut cfg = RenderConfig::default();
    cfg.project.kernel = KernelMode::Gaussian;
    let check = gradient_check(&scene, &view, &cfg, &target);
    assert!(check.pass_rate() >= 0.98, "{:?}", check.worst);
    let frame = render_forward(&scene, &view, &cfg).unwrap();
    let (_, d) = sq_loss(&frame.color.data, &target);
    let g = render_backward(&scene, &view, &cfg, &frame, &d).unwrap();
    assert!(g.grads.iter().all(|p| p.d_beta == [0.0; 3] && p.d_dir == [0.0; 3]));
}

#[test]
fn opacity_damping_scales_opacity_gradient() {
    let mut r = rng(33);
    let scene = random_scene(&mut r, 3, 0, true);
    let view = test_view(&mut r, 8, 8);
    let target = random_target(&mut r, &view);
    let plain = RenderConfig::default();
    let damped = RenderConfig { opacity_grad_damping: 0.5, ..RenderConfig::default() };
    let frame = render_forward(&scene, &view, &plain).unwrap();
    let (_, d) = sq_loss(&frame.color.data, &target);
    let a = render_backward(&scene, &view, &plain, &frame, &d).unwrap();
    let b = render_backward(&scene, &view, &damped, &frame, &d).unwrap();
    for s in &frame.splats {
        let n = s.skew2d.norm();
        let k = 1.0 / (1.0 + 0.5 * n * n);
        for j in 0..2 {
            let want = a.grads[s.index].d_opacity_logits[j] * k;
            assert!((b.grads[s.index].d_opacity_logits[j] - want).abs() < 1e-15);
        }
        assert_eq!(a.grads[s.index].d_mu, b.grads[s.index].d_mu);
    }
}
