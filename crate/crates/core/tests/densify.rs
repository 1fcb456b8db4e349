mod common;

use common::*;
use proptest::prelude::*;
use rand::Rng;
use skewsplat::adam::Origin;
use skewsplat::backward::GradientBundle;
use skewsplat::densify::{DensifyConfig, DensifyStats, Densifier, DepthThreshold};
use skewsplat::forward::{render_image, RenderConfig};
use skewsplat::scene::{logit, Scene};

/// Densifier whose statistics come from one synthetic observation.
fn densifier_with(scene: &Scene<f64>, cfg: DensifyConfig<f64>, g_uv: &[f64], g_z: &[f64], d_mu: &[[f64; 3]]) -> Densifier<f64> {
    let mut d = Densifier::new(cfg, scene.len());
    let mut b = GradientBundle::zeros(scene);
    for i in 0..scene.len() {
        b.visible[i] = true;
        b.g_uv[i] = g_uv[i];
        b.g_z[i] = g_z[i];
        b.grads[i].d_mu = d_mu[i];
    }
    d.stats.accumulate(&b);
    d
}

fn max_pixel_delta(a: &Scene<f64>, b: &Scene<f64>, view: &skewsplat::View64) -> f64 {
    let cfg = RenderConfig::default();
    let ia = render_image(a, view, &cfg).unwrap();
    let ib = render_image(b, view, &cfg).unwrap();
    ia.data.iter().zip(&ib.data).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn densify_keeps_every_field_finite(seed in 0u64..10_000, n in 1usize..24, big in 0.0f64..1e6) {
        let mut r = rng(seed);
        let mut scene = random_scene(&mut r, n, 1, true);
        let g_uv: Vec<f64> = (0..n).map(|_| r.random_range(0.0..0.004)).collect();
        let g_z: Vec<f64> = (0..n).map(|_| r.random_range(0.0..big.max(1e-9))).collect();
        let d_mu: Vec<[f64; 3]> = (0..n).map(|_| std::array::from_fn(|_| r.random_range(-big..=big))).collect();
        let cfg = DensifyConfig {
            split_scale_threshold: r.random_range(0.1..0.5),
            clone_step: 1e-3,
            prune_alpha: r.random_range(0.0..0.3),
            ..DensifyConfig::default()
        };
        let mut d = densifier_with(&scene, cfg, &g_uv, &g_z, &d_mu);
        let (report, origins) = d.densify_and_prune(&mut scene);
        prop_assert_eq!(scene.len(), n + report.n_cloned + report.n_split - report.n_pruned);
        prop_assert_eq!(origins.len(), scene.len());
        prop_assert!(scene.primitives.iter().all(|g| g.is_finite()));
        for g in &scene.primitives {
            let [a, b] = g.opacities();
            prop_assert!(a.max(b) >= cfg.prune_alpha);
        }
        let kept: Vec<usize> = origins.iter().filter_map(|o| match o { Origin::Kept(i) => Some(*i), Origin::New => None }).collect();
        prop_assert!(kept.windows(2).all(|w| w[0] < w[1]));
        prop_assert!(kept.iter().all(|i| *i < n));
        prop_assert_eq!(d.stats.len(), scene.len());
    }

    #[test]
    fn infinite_depth_threshold_reduces_to_screen_criterion(seed in 0u64..10_000, n in 1usize..40) {
        let mut r = rng(seed);
        let scene = random_scene(&mut r, n, 0, true);
        let g_uv: Vec<f64> = (0..n).map(|_| r.random_range(0.0..0.002)).collect();
        let g_z: Vec<f64> = (0..n).map(|_| r.random_range(0.0..10.0)).collect();
        let zero = vec![[0.0; 3]; n];
        for tau_z in [DepthThreshold::Disabled, DepthThreshold::Fixed(f64::INFINITY)] {
            let cfg = DensifyConfig { tau_z, ..DensifyConfig::default() };
            let flags = densifier_with(&scene, cfg, &g_uv, &g_z, &zero).flags();
            let plain: Vec<bool> = g_uv.iter().map(|g| *g > cfg.tau_uv).collect();
            prop_assert_eq!(flags, plain);
        }
    }

    #[test]
    fn pruning_changes_pixels_by_a_bounded_amount(seed in 0u64..10_000, n in 2usize..12, skewed in any::<bool>()) {
        let mut r = rng(seed);
        let mut scene = random_scene(&mut r, n, 0, skewed);
        let prune_alpha = r.random_range(0.005..0.05);
        let mut n_low = 0;
        for g in scene.primitives.iter_mut() {
            if r.random_bool(0.4) {
                let p = r.random_range(0.0..prune_alpha);
                g.opacity_logits = [logit(p), if skewed { logit(r.random_range(0.0..prune_alpha)) } else { logit(p) }];
                n_low += 1;
            }
        }
        let view = test_view(&mut r, 24, 24);
        let before = scene.clone();
        let cfg = DensifyConfig { prune_alpha, ..DensifyConfig::default() };
        let (pruned, _) = Densifier::new(cfg, scene.len()).prune_only(&mut scene);
        prop_assert_eq!(pruned, n_low);
        // a skew kernel peaks at twice its envelope, so its opacity bound doubles
        let kernel_peak = if skewed { 2.0 } else { 1.0 };
        let delta = max_pixel_delta(&before, &scene, &view);
        prop_assert!(delta <= kernel_peak * pruned as f64 * prune_alpha + 1e-12, "delta {} pruned {}", delta, pruned);
    }
}

#[test]
fn zero_offset_clone_touches_only_its_footprint() {
    let mut r = rng(31);
    let scene = random_scene(&mut r, 6, 0, true);
    let view = test_view(&mut r, 32, 32);
    let mut cloned = scene.clone();
    let mut g_uv = vec![0.0; 6];
    g_uv[2] = 1.0;
    let cfg = DensifyConfig { split_scale_threshold: 10.0, clone_step: 0.0, prune_alpha: 0.0, ..DensifyConfig::default() };
    let mut d = densifier_with(&cloned, cfg, &g_uv, &[0.0; 6], &[[1.0, -2.0, 3.0]; 6]);
    let (report, _) = d.densify_and_prune(&mut cloned);
    assert_eq!((report.n_cloned, report.n_split), (1, 0));
    assert_eq!(cloned.primitives[6], scene.primitives[2]);

    let rc = RenderConfig::default();
    let a = render_image(&scene, &view, &rc).unwrap();
    let b = render_image(&cloned, &view, &rc).unwrap();
    let mut only = Scene::new(0);
    only.push(scene.primitives[2].clone());
    let footprint = render_image(&only, &view, &rc).unwrap();
    let mut changed = 0;
    for p in 0..a.pixel_count() {
        let inside = (0..3).any(|c| footprint.data[p * 3 + c] != 0.0);
        let same = (0..3).all(|c| a.data[p * 3 + c] == b.data[p * 3 + c]);
        assert!(inside || same, "pixel {p} changed outside the clone's footprint");
        changed += usize::from(!same);
    }
    // coincident copies composite to 1 − (1 − α)², so the image must move
    assert!(changed > 0);
}

#[test]
fn stats_reset_after_densify() {
    let mut r = rng(8);
    let mut scene = random_scene(&mut r, 5, 0, true);
    let mut d = densifier_with(&scene, DensifyConfig::default(), &[1.0; 5], &[0.0; 5], &[[0.0; 3]; 5]);
    d.densify_and_prune(&mut scene);
    assert_eq!(d.stats, DensifyStats::new(scene.len()));
}
