use jointstream_core::frequency::{self, dft2d, dwt_haar, fft1d, idft2d, idwt_haar, ComplexGrid, Direction, SubbandSet};
use jointstream_core::imaging::{resize_bilinear, rgb_to_ycbcr, ycbcr_to_rgb};
use jointstream_core::{Matrix, RasterImage, Semantics};
use jointstream_oracles as oracle;
use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_grid(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Vec<Vec<f64>> {
    (0..rows).map(|_| (0..cols).map(|_| rng.random_range(-10.0..10.0)).collect()).collect()
}

fn to_matrix(grid: &[Vec<f64>]) -> Matrix {
    Matrix::from_rows(grid).unwrap()
}

fn flatten(grid: &[Vec<Complex64>]) -> Vec<Complex64> {
    grid.iter().flatten().copied().collect()
}

#[test]
fn fft_matches_direct_sum_for_every_length_up_to_64() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for n in 1..=64 {
        let x: Vec<Complex64> =
            (0..n).map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
        for (dir, inverse) in [(Direction::Forward, false), (Direction::Inverse, true)] {
            let got = fft1d(&x, dir).unwrap();
            let want = oracle::naive_dft(&x, inverse);
            let err = oracle::relative_error(&got, &want);
            assert!(err <= 1e-9, "n={n} inverse={inverse} err={err}");
        }
    }
}

#[test]
fn length_twelve_against_direct_sum() {
    let x: Vec<Complex64> = (0..12).map(|i| Complex64::new((i as f64 * 0.7).sin(), (i as f64).cos())).collect();
    let err = oracle::relative_error(&fft1d(&x, Direction::Forward).unwrap(), &oracle::naive_dft(&x, false));
    assert!(err <= 1e-9);
}

#[test]
fn empty_signal_is_rejected() {
    assert!(fft1d(&[], Direction::Forward).is_err());
}

#[test]
fn dft2d_matches_quadruple_loop() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..30 {
        let rows = rng.random_range(1..=16);
        let cols = rng.random_range(1..=16);
        let grid = random_grid(&mut rng, rows, cols);
        let got = dft2d(&to_matrix(&grid)).unwrap();
        let want = flatten(&oracle::naive_dft2d(&grid));
        assert!(oracle::relative_error(got.data(), &want) <= 1e-9, "{rows}x{cols}");
    }
}

#[test]
fn dft2d_constant_and_impulse() {
    let c = 2.5;
    let n = 6;
    let spec = dft2d(&Matrix::from_vec(n, n, vec![c; n * n]).unwrap()).unwrap();
    for r in 0..n {
        for k in 0..n {
            let want = if r == 0 && k == 0 { c * (n * n) as f64 } else { 0.0 };
            assert!((spec.get(r, k) - Complex64::new(want, 0.0)).norm() <= 1e-9);
        }
    }
    let mut impulse = Matrix::zeros(5, 4);
    impulse.set(0, 0, 1.0);
    for z in dft2d(&impulse).unwrap().data() {
        assert!((z - Complex64::new(1.0, 0.0)).norm() <= 1e-12);
    }
}

#[test]
fn parseval_linearity_and_inverse() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..20 {
        let rows = rng.random_range(1..=12);
        let cols = rng.random_range(1..=12);
        let x = to_matrix(&random_grid(&mut rng, rows, cols));
        let y = to_matrix(&random_grid(&mut rng, rows, cols));
        let fx = dft2d(&x).unwrap();
        let fy = dft2d(&y).unwrap();

        let time: f64 = x.as_slice().iter().map(|v| v * v).sum();
        let freq: f64 = fx.data().iter().map(|z| z.norm_sqr()).sum::<f64>() / (rows * cols) as f64;
        assert!((time - freq).abs() / time <= 1e-9);

        let (a, b) = (1.7, -0.4);
        let combo: Vec<f64> = x.as_slice().iter().zip(y.as_slice()).map(|(p, q)| a * p + b * q).collect();
        let got = dft2d(&Matrix::from_vec(rows, cols, combo).unwrap()).unwrap();
        let want: Vec<Complex64> = fx.data().iter().zip(fy.data()).map(|(p, q)| p * a + q * b).collect();
        assert!(oracle::relative_error(got.data(), &want) <= 1e-9);

        let back = idft2d(&fx).unwrap();
        for (z, v) in back.data().iter().zip(x.as_slice()) {
            assert!((z.re - v).abs() <= 1e-9 && z.im.abs() <= 1e-9);
        }
    }
}

#[test]
fn fftshift_moves_dc_to_centre() {
    for (rows, cols) in [(4, 4), (5, 3), (1, 6)] {
        let mut g = Matrix::zeros(rows, cols);
        g.set(0, 0, 1.0);
        let s = frequency::fftshift(&g);
        assert_eq!(s.get(rows / 2, cols / 2), 1.0);
        assert_eq!(s.as_slice().iter().sum::<f64>(), 1.0);
    }
}

fn ycbcr_patch(rng: &mut ChaCha8Rng, size: usize) -> RasterImage {
    let bytes: Vec<u8> = (0..size * size * 3).map(|_| rng.random()).collect();
    rgb_to_ycbcr(&RasterImage::from_rgb8_interleaved(size, size, &bytes).unwrap()).unwrap()
}

fn plane_rows(img: &RasterImage, c: usize) -> Vec<Vec<f64>> {
    img.plane(c).chunks(img.width()).map(<[f64]>::to_vec).collect()
}

#[test]
fn dft_stack_is_shifted_real_part_per_channel() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let patch = ycbcr_patch(&mut rng, 8);
    let stack = frequency::dft_stack(&patch).unwrap();
    assert_eq!(stack.semantics(), Semantics::SpectrumReal3);
    assert_eq!((stack.width(), stack.height()), (8, 8));
    for c in 0..3 {
        let spectrum = oracle::naive_dft2d(&plane_rows(&patch, c));
        for r in 0..8 {
            for k in 0..8 {
                let want = spectrum[(r + 4) % 8][(k + 4) % 8].re;
                let got = stack.get(c, k, r);
                assert!((got - want).abs() <= 1e-9 * want.abs().max(1.0));
            }
        }
    }
}

#[test]
fn dft_stack_constant_channel_has_single_centre_value() {
    let patch = rgb_to_ycbcr(&RasterImage::filled_rgb(6, 6, [100, 100, 100])).unwrap();
    let stack = frequency::dft_stack(&patch).unwrap();
    for y in 0..6 {
        for x in 0..6 {
            let v = stack.get(0, x, y);
            if (x, y) == (3, 3) {
                assert!((v - 3600.0).abs() < 1e-9);
            } else {
                assert!(v.abs() < 1e-9);
            }
        }
    }
}

#[test]
fn threshold_view_matches_two_pass_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let (w, h) = (7, 5);
    let data: Vec<f64> = (0..3 * w * h).map(|_| rng.random_range(-50.0..50.0)).collect();
    let spectrum = RasterImage::new(w, h, Semantics::SpectrumReal3, data.clone()).unwrap();
    let view = frequency::threshold_view(&spectrum).unwrap();
    assert_eq!(view.semantics(), Semantics::Gray1);
    let mut total = 0.0;
    for v in &data {
        total += v;
    }
    let mean = total / data.len() as f64;
    for i in 0..w * h {
        let pixel = (data[i] + data[w * h + i] + data[2 * w * h + i]) / 3.0;
        assert_eq!(view.data()[i], if pixel > mean { 1.0 } else { 0.0 });
    }
}

#[test]
fn threshold_view_two_level_and_constant() {
    let (w, h) = (4, 2);
    let half: Vec<f64> = (0..w * h).map(|i| if i < 4 { 0.0 } else { 10.0 }).collect();
    let data: Vec<f64> = half.iter().cycle().take(3 * w * h).copied().collect();
    let view = frequency::threshold_view(&RasterImage::new(w, h, Semantics::SpectrumReal3, data).unwrap()).unwrap();
    assert_eq!(view.data(), &[0.0, 0.0, 0.0, 0.0, 1.0, 1.0, 1.0, 1.0]);
    let flat = RasterImage::new(w, h, Semantics::SpectrumReal3, vec![3.0; 3 * w * h]).unwrap();
    assert!(frequency::threshold_view(&flat).unwrap().data().iter().all(|&v| v == 0.0));
}

#[test]
fn haar_matches_block_oracle_round_trips_and_keeps_energy() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..50 {
        let rows = 2 * rng.random_range(1..=10);
        let cols = 2 * rng.random_range(1..=10);
        let grid = random_grid(&mut rng, rows, cols);
        let x = to_matrix(&grid);
        let bands = dwt_haar(&x).unwrap();
        let want = oracle::haar_blocks(&grid);
        for (got, want) in bands.ordered().iter().zip(&want) {
            let flat: Vec<f64> = want.iter().flatten().copied().collect();
            for (a, b) in got.as_slice().iter().zip(&flat) {
                assert!((a - b).abs() <= 1e-12);
            }
        }
        let back = idwt_haar(&bands);
        for (a, b) in back.as_slice().iter().zip(x.as_slice()) {
            assert!((a - b).abs() <= 1e-12);
        }
        let energy_in: f64 = x.as_slice().iter().map(|v| v * v).sum();
        let energy_out: f64 = bands.ordered().iter().flat_map(|b| b.as_slice()).map(|v| v * v).sum();
        assert!((energy_in - energy_out).abs() / energy_in <= 1e-12);
    }
}

#[test]
fn haar_special_inputs() {
    let c = 3.25;
    let bands = dwt_haar(&Matrix::from_vec(4, 6, vec![c; 24]).unwrap()).unwrap();
    assert!(bands.ll().as_slice().iter().all(|&v| v == 2.0 * c));
    for band in [bands.lh(), bands.hl(), bands.hh()] {
        assert!(band.as_slice().iter().all(|&v| v == 0.0));
    }

    let row = [1.0, 4.0, -2.0, 0.5];
    let same_rows: Vec<Vec<f64>> = (0..4).map(|_| row.to_vec()).collect();
    let bands = dwt_haar(&to_matrix(&same_rows)).unwrap();
    assert!(bands.lh().as_slice().iter().all(|&v| v == 0.0));
    assert!(bands.hh().as_slice().iter().all(|&v| v == 0.0));

    let zero = Matrix::zeros(3, 3);
    let sub = SubbandSet::new(zero.clone(), zero.clone(), zero.clone(), zero).unwrap();
    assert!(idwt_haar(&sub).as_slice().iter().all(|&v| v == 0.0));

    assert!(dwt_haar(&Matrix::zeros(3, 4)).is_err());
    assert!(SubbandSet::new(Matrix::zeros(2, 2), Matrix::zeros(2, 2), Matrix::zeros(2, 3), Matrix::zeros(2, 2)).is_err());
}

#[test]
fn dwt_stack_composes_resize_and_haar() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let patch = ycbcr_patch(&mut rng, 6);
    let stack = frequency::dwt_stack(&patch).unwrap();
    assert_eq!(stack.semantics(), Semantics::SubbandStack12);
    assert_eq!((stack.width(), stack.height(), stack.channels()), (6, 6, 12));
    for c in 0..3 {
        let plane = plane_rows(&patch, c);
        let up: Vec<Vec<f64>> = (0..12).map(|y| (0..12).map(|x| oracle::bilinear_at(&plane, 12, 12, x, y)).collect()).collect();
        let bands = oracle::haar_blocks(&up);
        for (b, band) in bands.iter().enumerate() {
            for y in 0..6 {
                for x in 0..6 {
                    assert!((stack.get(4 * c + b, x, y) - band[y][x]).abs() <= 1e-9);
                }
            }
        }
    }
}

#[test]
fn dwt_stack_constant_gray_patch() {
    let g = 120u8;
    let patch = rgb_to_ycbcr(&RasterImage::filled_rgb(4, 4, [g; 3])).unwrap();
    let stack = frequency::dwt_stack(&patch).unwrap();
    for c in 0..12 {
        let want = if c == 0 { 2.0 * g as f64 } else { 0.0 };
        assert!(stack.plane(c).iter().all(|&v| v == want), "channel {c}");
    }
}

#[test]
fn bilinear_matches_pointwise_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let grid = random_grid(&mut rng, 5, 3);
    let flat: Vec<f64> = grid.iter().flatten().copied().collect();
    let img = RasterImage::new(3, 5, Semantics::Gray1, flat).unwrap();
    for (ow, oh) in [(7, 4), (3, 5), (1, 1), (12, 10)] {
        let out = resize_bilinear(&img, ow, oh).unwrap();
        for y in 0..oh {
            for x in 0..ow {
                assert!((out.get(0, x, y) - oracle::bilinear_at(&grid, ow, oh, x, y)).abs() <= 1e-12);
            }
        }
    }
}

#[test]
fn ycbcr_lattice_round_trip() {
    let mut bytes = Vec::new();
    for r in (0..=255).step_by(5) {
        for g in (0..=255).step_by(5) {
            for b in (0..=255).step_by(15) {
                bytes.extend_from_slice(&[r as u8, g as u8, b as u8]);
            }
        }
    }
    let n = bytes.len() / 3;
    assert!(n >= 10_000);
    let rgb = RasterImage::from_rgb8_interleaved(n, 1, &bytes).unwrap();
    let back = ycbcr_to_rgb(&rgb_to_ycbcr(&rgb).unwrap()).unwrap();
    let err = rgb.data().iter().zip(back.data()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(err <= 1e-9, "max error {err}");
}

#[test]
fn ycbcr_hand_value() {
    let red = rgb_to_ycbcr(&RasterImage::filled_rgb(1, 1, [255, 0, 0])).unwrap();
    assert!((red.get(0, 0, 0) - 76.245).abs() < 1e-9);
    assert!((red.get(1, 0, 0) - -43.00218).abs() < 1e-9);
    assert!((red.get(2, 0, 0) - 127.452315).abs() < 1e-9);
    let white = rgb_to_ycbcr(&RasterImage::filled_rgb(1, 1, [255, 255, 255])).unwrap();
    assert_eq!(white.data(), &[255.0, 0.0, 0.0]);
}

#[test]
fn complex_grid_shape_checks() {
    assert!(ComplexGrid::from_vec(2, 2, vec![Complex64::new(0.0, 0.0); 3]).is_none());
}

proptest! {
    #[test]
    fn gray_axis_has_no_chroma(v in 0u8..=255) {
        let img = rgb_to_ycbcr(&RasterImage::filled_rgb(1, 1, [v; 3])).unwrap();
        prop_assert_eq!(img.get(0, 0, 0), v as f64);
        prop_assert_eq!(img.get(1, 0, 0), 0.0);
        prop_assert_eq!(img.get(2, 0, 0), 0.0);
    }

    #[test]
    fn ycbcr_round_trip_any_pixel(r in 0u8..=255, g in 0u8..=255, b in 0u8..=255) {
        let rgb = RasterImage::filled_rgb(1, 1, [r, g, b]);
        let back = ycbcr_to_rgb(&rgb_to_ycbcr(&rgb).unwrap()).unwrap();
        for (x, y) in rgb.data().iter().zip(back.data()) {
            prop_assert!((x - y).abs() <= 1e-9);
        }
    }

    #[test]
    fn haar_round_trip_any_even_grid(h in 1usize..6, w in 1usize..6, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = to_matrix(&random_grid(&mut rng, 2 * h, 2 * w));
        let back = idwt_haar(&dwt_haar(&x).unwrap());
        for (a, b) in back.as_slice().iter().zip(x.as_slice()) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
    }
}
