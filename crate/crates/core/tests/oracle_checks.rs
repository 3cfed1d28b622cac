mod support;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use thermsal_core::detmetrics::{
    average_precision, fppi_missrate_curve, lamr, ApInterpolation, BBox, FrameInput, ScoredBox,
};
use thermsal_core::imagery::{resize_lanczos, FloatMap, GrayImage};
use thermsal_core::saliency::{
    dft2d, fine_grained, idft2d, integral_image, spectral_residual, FineGrainedParams, SpectralResidualParams,
};
use thermsal_core::salmetrics::{f_beta, BinaryMask};

use support::*;

fn random_gray(rng: &mut StdRng, w: usize, h: usize) -> GrayImage {
    GrayImage::from_fn(w, h, |_, _| rng.gen()).unwrap()
}

#[test]
fn fast_dft_matches_direct_sum() {
    let mut rng = StdRng::seed_from_u64(7);
    for (w, h) in [(8, 8), (5, 7), (16, 6), (1, 9)] {
        let data: Vec<f64> = (0..w * h).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let m = FloatMap::new(w, h, data.clone()).unwrap();
        let fast = dft2d(&m);
        let (re, im) = dft_direct(w, h, &data, &vec![0.0; w * h], -1.0);
        for i in 0..w * h {
            assert!((fast.re[i] - re[i]).abs() < 1e-9, "{w}x{h} re[{i}]");
            assert!((fast.im[i] - im[i]).abs() < 1e-9, "{w}x{h} im[{i}]");
        }
        let back = idft2d(&fast);
        for i in 0..w * h {
            assert!((back.re[i] - data[i]).abs() < 1e-9);
            assert!(back.im[i].abs() < 1e-9);
        }
    }
}

#[test]
fn lanczos_upscale_matches_direct_windowed_sinc() {
    let ramp: Vec<f64> = (0..16).map(|i| (i % 4) as f64 + 4.0 * (i / 4) as f64).collect();
    let src = FloatMap::new(4, 4, ramp.clone()).unwrap();
    let fast = resize_lanczos(&src, 8, 8).unwrap();
    let direct = lanczos_upscale_direct(&ramp, 4, 4, 8, 8);
    for (a, b) in fast.data().iter().zip(&direct) {
        assert!((a - b).abs() < 1e-9, "{a} vs {b}");
    }

    let mut rng = StdRng::seed_from_u64(11);
    let data: Vec<f64> = (0..5 * 3).map(|_| rng.gen()).collect();
    let src = FloatMap::new(5, 3, data.clone()).unwrap();
    let fast = resize_lanczos(&src, 13, 7).unwrap();
    let direct = lanczos_upscale_direct(&data, 5, 3, 13, 7);
    for (a, b) in fast.data().iter().zip(&direct) {
        assert!((a - b).abs() < 1e-9);
    }
}

#[test]
fn integral_image_box_sums_match_brute_force() {
    let mut rng = StdRng::seed_from_u64(3);
    let data: Vec<f64> = (0..256).map(|_| rng.gen_range(0.0..255.0)).collect();
    let sat = integral_image(&FloatMap::new(16, 16, data.clone()).unwrap());
    let at = |x: i64, y: i64| {
        if x < 0 || y < 0 {
            0.0
        } else {
            sat.get(x as usize, y as usize)
        }
    };
    for _ in 0..200 {
        let (x0, x1) = {
            let a = rng.gen_range(0..16);
            let b = rng.gen_range(0..16);
            (a.min(b), a.max(b))
        };
        let (y0, y1) = {
            let a = rng.gen_range(0..16);
            let b = rng.gen_range(0..16);
            (a.min(b), a.max(b))
        };
        let from_table = at(x1, y1) - at(x0 - 1, y1) - at(x1, y0 - 1) + at(x0 - 1, y0 - 1);
        let mut brute = 0.0;
        for y in y0..=y1 {
            for x in x0..=x1 {
                brute += data[(y * 16 + x) as usize];
            }
        }
        assert!((from_table - brute).abs() < 1e-9);
    }
}

#[test]
fn fine_grained_matches_brute_force_box_means() {
    let mut rng = StdRng::seed_from_u64(5);
    for radii in [vec![3], vec![2, 5], vec![3, 7, 15]] {
        let img = random_gray(&mut rng, 32, 32);
        let params = FineGrainedParams {
            surround_radii: radii.clone(),
        };
        let fast = fine_grained::<f64>(&img, &params).unwrap();
        let direct = fine_grained_direct(img.data(), 32, 32, &radii);
        for (a, b) in fast.data().iter().zip(&direct) {
            assert!((a - b).abs() < 1e-9);
        }
    }
}

#[test]
fn spectral_residual_matches_direct_definition() {
    let mut rng = StdRng::seed_from_u64(13);
    let params = SpectralResidualParams::<f64> {
        working_width: 16,
        working_height: 16,
        ..Default::default()
    };
    for _ in 0..3 {
        let img = random_gray(&mut rng, 16, 16);
        let fast = spectral_residual(&img, &params).unwrap();
        let direct = spectral_residual_direct(img.data(), 16, 16, 1e-8, 2.5);
        let err = fast
            .data()
            .iter()
            .zip(&direct)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-6, "max error {err}");
    }
    // no smoothing, non-square working size
    let params = SpectralResidualParams::<f64> {
        working_width: 12,
        working_height: 10,
        smoothing_sigma: 0.0,
        ..Default::default()
    };
    let img = random_gray(&mut rng, 12, 10);
    let fast = spectral_residual(&img, &params).unwrap();
    let direct = spectral_residual_direct(img.data(), 12, 10, 1e-8, 0.0);
    for (a, b) in fast.data().iter().zip(&direct) {
        assert!((a - b).abs() < 1e-6);
    }
}

#[test]
fn lamr_and_ap_match_brute_force() {
    let mut rng = StdRng::seed_from_u64(17);
    for _ in 0..300 {
        let frames = random_instance(&mut rng, 5, 5, 2, 8);
        let curve = fppi_missrate_curve(&frames, 0.5).unwrap();
        let fast = lamr(&curve);
        let brute = lamr_brute(&frames, 0.5);
        assert!((fast - brute).abs() <= 1e-12, "{fast} vs {brute}");

        let ap = average_precision(&frames, 0.5, ApInterpolation::AllPoint).unwrap();
        assert_eq!(ap, ap_envelope_oracle(&frames, 0.5));
    }
}

#[test]
fn f1_matches_confusion_matrix() {
    let mut rng = StdRng::seed_from_u64(19);
    for _ in 0..100 {
        let n = rng.gen_range(1..64);
        let p: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.4)).collect();
        let g: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.4)).collect();
        let f = f_beta(
            &BinaryMask::new(n, 1, p.clone()).unwrap(),
            &BinaryMask::new(n, 1, g.clone()).unwrap(),
            1.0f64,
        )
        .unwrap();
        assert_eq!(f, f1_oracle(&p, &g));
    }
}

#[test]
fn two_overlapping_detections_trace() {
    let gt = BBox::new(0.0, 0.0, 20.0, 40.0);
    let frame = FrameInput {
        dets: vec![
            ScoredBox {
                bbox: BBox::new(1.0, 1.0, 20.0, 40.0),
                score: 0.8,
            },
            ScoredBox {
                bbox: BBox::new(0.0, 2.0, 20.0, 40.0),
                score: 0.9,
            },
        ],
        kept: vec![gt],
        ignored: vec![],
    };
    let labels = match_ref(&frame, f64::NEG_INFINITY, 0.5);
    assert_eq!(labels, vec![(1, RefLabel::Tp), (0, RefLabel::Fp)]);
    let curve = fppi_missrate_curve(std::slice::from_ref(&frame), 0.5).unwrap();
    assert_eq!(curve.len(), 2);
    assert_eq!((curve[0].fppi, curve[0].miss_rate), (0.0, 0.0));
    assert_eq!((curve[1].fppi, curve[1].miss_rate), (1.0, 0.0));
    assert_eq!(
        average_precision(&[frame], 0.5, ApInterpolation::AllPoint).unwrap(),
        1.0
    );
}
