use super::*;
use crate::imaging::{render_gs, render_rs_analytic, CameraConfig};
use crate::losses::psnr_interior;
use alloc::vec;

fn texture(w: usize, h: usize, seed: u32) -> Image {
    let k = seed as f32 * 0.37;
    Image::from_fn(w, h, 1, |x, y, _| {
        let (x, y) = (x as f32, y as f32);
        0.5 + 0.2 * libm::sinf(0.31 * x + 0.17 * y + k)
            + 0.15 * libm::cosf(0.23 * y - 0.11 * x + 2.0 * k)
            + 0.1 * libm::sinf(0.07 * (x + y) + k)
    })
}

fn pair(base: &Image, model: &MotionModel) -> (RsImage, RsImage) {
    let cfg = CameraConfig::unit(base.height(), base.width()).unwrap();
    (
        render_rs_analytic(base, model, &cfg, ScanDirection::TopToBottom).unwrap(),
        render_rs_analytic(base, model, &cfg, ScanDirection::BottomToTop).unwrap(),
    )
}

#[test]
fn eval_motion_examples() {
    let zero = eval_motion(&MotionModel::translation(0.0, 0.0), 4, 3).unwrap();
    assert!(zero.data().iter().all(|v| *v == [0.0, 0.0]));
    let t = eval_motion(&MotionModel::translation(3.0, -1.0), 4, 3).unwrap();
    assert!(t.data().iter().all(|v| *v == [3.0, -1.0]));
    let a = eval_motion(&MotionModel::Affine([1.01, 0.0, 0.0, 0.0, 1.0, 0.0]), 10, 5).unwrap();
    for (x, y) in [(0, 0), (9, 0), (9, 4)] {
        let [u, v] = a.get(x, y);
        assert!((u - 0.01 * x as f32).abs() < 1e-6 && v == 0.0);
    }
}

#[test]
fn fusion_mask_examples() {
    use ScanDirection::*;
    let d = |m, dir| time_displacement(5, m, dir).unwrap();
    let mid = fusion_mask(&d(3, TopToBottom), &d(3, BottomToTop)).unwrap();
    assert_eq!(mid.values(), &[0.5; 5]);
    let first = fusion_mask(&d(1, TopToBottom), &d(1, BottomToTop)).unwrap();
    assert_eq!(first.values()[0], 1.0);
    assert_eq!(first.values()[4], 0.0);
    assert!(first.values().iter().all(|v| (0.0..=1.0).contains(v)));
    let bad = TimeMap::new(vec![0.0; 4]);
    assert!(fusion_mask(&d(1, TopToBottom), &bad).is_err());
}

#[test]
fn static_scene_is_fixed_point() {
    let base = texture(24, 20, 1);
    let (a, b) = pair(&base, &MotionModel::translation(0.0, 0.0));
    for model in [
        MotionModel::translation(0.0, 0.0),
        MotionModel::translation(2.0, 1.0),
    ] {
        for m in [1, 7, 20] {
            let gs = rs_to_gs(&a, &b, &model, m).unwrap();
            if model.params() == [0.0, 0.0] {
                assert_eq!(gs, base);
            }
        }
    }
}

#[test]
fn zero_displacement_row_is_copied() {
    let base = texture(32, 32, 2);
    let model = MotionModel::translation(2.5, 0.0);
    let (a, b) = pair(&base, &model);
    for m in [1, 10, 32] {
        let gs = rs_to_gs(&a, &b, &model, m).unwrap();
        assert_eq!(gs.row(m - 1), a.pixels.row(m - 1));
    }
}

#[test]
fn planted_translation_matches_ground_truth() {
    let base = texture(64, 64, 3);
    let model = MotionModel::translation(3.0, 0.0);
    let (a, b) = pair(&base, &model);
    for m in [1, 32, 64] {
        let gs = rs_to_gs(&a, &b, &model, m).unwrap();
        let truth = render_gs(&base, &model, (m - 1) as f64 / 63.0).unwrap();
        let q = psnr_interior(&gs, &truth, 4).unwrap();
        assert!(q > 35.0, "m = {m}: {q} dB");
    }
}

#[test]
fn config_mismatch_is_rejected() {
    let base = texture(16, 16, 4);
    let (a, mut b) = pair(&base, &MotionModel::translation(0.0, 0.0));
    let model = MotionModel::translation(0.0, 0.0);
    assert!(rs_to_gs(&a, &a, &model, 1).is_err());
    b.config = CameraConfig::new(16, 16, 2.0, 0.0).unwrap();
    assert!(rs_to_gs(&a, &b, &model, 1).is_err());
}

#[test]
fn sample_rows_spacing() {
    assert_eq!(sample_rows(65, 8), vec![9, 17, 25, 33, 41, 49, 57]);
    assert_eq!(sample_rows(64, 8).len(), 7);
    assert!(sample_rows(64, 1).is_empty());
    assert_eq!(sample_rows(3, 8), vec![1, 2, 3]);
}

#[test]
fn video_rows() {
    let base = texture(8, 257, 5);
    let (a, b) = pair(&base, &MotionModel::translation(0.0, 0.0));
    let model = MotionModel::translation(0.0, 0.0);
    let v = generate_video(&a, &b, &model, 9).unwrap();
    assert_eq!(v.rows, (0..9).map(|k| 1 + 32 * k).collect::<Vec<_>>());
    assert!(!v.clipped);
    assert!(v.sequence.frames().iter().all(|f| *f == base));
    let two = generate_video(&a, &b, &model, 2).unwrap();
    assert_eq!(two.rows, vec![1, 257]);
    let many = generate_video(&a, &b, &model, 1000).unwrap();
    assert!(many.clipped);
    assert_eq!(many.rows.len(), 257);
    assert!(generate_video(&a, &b, &model, 1).is_err());
}

#[test]
fn static_fit_stays_at_zero() {
    let base = texture(32, 32, 6);
    let (a, b) = pair(&base, &MotionModel::translation(0.0, 0.0));
    let cfg = FitConfig {
        stages: 1,
        ..FitConfig::default()
    };
    let out = fit(&a, &b, &MotionModel::translation(0.0, 0.0), &cfg).unwrap();
    let p = out.fitted_model.params();
    assert!(p[0].abs() < 0.05 && p[1].abs() < 0.05, "{p:?}");
    assert!((out.diagnostics.final_loss.l_self - 4e-3).abs() < 1e-6);
    assert!(out.loss_trace.windows(2).all(|w| w[1] <= w[0]));
    assert!(out.gs_frames.iter().all(|f| f.pixels.in_unit_range()));
}

#[test]
fn fit_rejects_dense_and_bad_config() {
    let base = texture(16, 16, 7);
    let (a, b) = pair(&base, &MotionModel::translation(0.0, 0.0));
    let dense = MotionModel::zero(MotionKind::Dense, 16, 16);
    assert!(fit(&a, &b, &dense, &FitConfig::default()).is_err());
    let bad = FitConfig {
        momentum: 1.5,
        ..FitConfig::default()
    };
    assert!(fit(&a, &b, &MotionModel::translation(0.0, 0.0), &bad).is_err());
    // 16 rows cannot take a 32 px crop
    assert!(matches!(
        fit(
            &a,
            &b,
            &MotionModel::translation(0.0, 0.0),
            &FitConfig::default()
        ),
        Err(Error::Degenerate(_))
    ));
}

#[test]
fn observer_sees_every_evaluation() {
    let base = texture(24, 24, 8);
    let (a, b) = pair(&base, &MotionModel::translation(0.0, 0.0));
    let cfg = FitConfig {
        stages: 1,
        max_iters: 5,
        ..FitConfig::default()
    };
    let mut seen = Vec::new();
    let out = fit_observed(
        &a,
        &b,
        &MotionModel::translation(0.0, 0.0),
        &cfg,
        &mut |e| seen.push((e.stage, e.evaluation.breakdown.total)),
    )
    .unwrap();
    assert_eq!(seen.len(), out.diagnostics.evaluations);
    assert!(seen.iter().all(|(s, v)| *s == 1 && v.is_finite()));
    let best = seen.iter().map(|s| s.1).fold(f64::INFINITY, f64::min);
    assert_eq!(best, *out.loss_trace.last().unwrap());
}
