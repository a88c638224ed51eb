//! Property-based invariants across modules.

use ascnet::audio::{decode_wav, parse_manifest, write_wav_pcm16, AudioClip};
use ascnet::augment::{mixup_batch, spec_augment, Axis, SpecAugmentConfig};
use ascnet::frontend::{
    delta, mel_filterbank, patch_stride, split_patches, FrontendConfig, FrontendKind, Matrix, Spectrogram,
};
use ascnet::nn::Tensor;
use ascnet::train::{
    average_patches, cross_entropy_loss, kl_mixup_loss, predict_label, prod_fusion, FusionInput, PredictionSet,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn simplex_rows(max_rows: usize, max_c: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    (1..=max_c).prop_flat_map(move |c| {
        prop::collection::vec(prop::collection::vec(0.001f64..1.0, c), 1..=max_rows).prop_map(|rows| {
            rows.into_iter()
                .map(|r| {
                    let s: f64 = r.iter().sum();
                    r.into_iter().map(|v| v / s).collect()
                })
                .collect()
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn patch_average_stays_on_simplex(rows in simplex_rows(12, 10)) {
        let mean = average_patches(&PredictionSet::new("r", rows.clone()).unwrap()).unwrap();
        prop_assert!(mean.iter().all(|&p| p >= 0.0));
        prop_assert!((mean.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        // same mean, opposite summation order
        let c = rows[0].len();
        let mut rev = vec![0.0; c];
        for row in rows.iter().rev() {
            for k in (0..c).rev() {
                rev[k] += row[k];
            }
        }
        for k in 0..c {
            prop_assert!((mean[k] - rev[k] / rows.len() as f64).abs() < 1e-7);
        }
    }

    #[test]
    fn fusion_labels_survive_rescaling(rows in simplex_rows(4, 8), scale in 1e-3f64..1e3) {
        let fused = prod_fusion(&FusionInput::new(rows.clone()).unwrap()).unwrap();
        let label = predict_label(&fused).unwrap();
        let scaled: Vec<f64> = fused.iter().map(|v| v * scale).collect();
        prop_assert_eq!(predict_label(&scaled).unwrap(), label);
        // product rule as a sum of logs
        let c = rows[0].len();
        let logs: Vec<f64> = (0..c).map(|k| rows.iter().map(|r| r[k].ln()).sum()).collect();
        let log_label = predict_label(&logs).unwrap();
        prop_assert!(log_label == label || (fused[log_label] - fused[label]).abs() <= 1e-12 * fused[label]);
    }

    #[test]
    fn single_network_fusion_is_identity(rows in simplex_rows(1, 10)) {
        let fused = prod_fusion(&FusionInput::new(rows.clone()).unwrap()).unwrap();
        prop_assert_eq!(&fused, &rows[0]);
    }

    #[test]
    fn identical_branches_keep_the_label(rows in simplex_rows(1, 10), s in 1usize..=3) {
        let row = rows[0].clone();
        let fused = prod_fusion(&FusionInput::new(vec![row.clone(); s]).unwrap()).unwrap();
        let (a, b) = (predict_label(&fused).unwrap(), predict_label(&row).unwrap());
        prop_assert!(a == b || (row[a] - row[b]).abs() < 1e-12);
    }

    #[test]
    fn argmax_is_scale_invariant(v in prop::collection::vec(-10.0f64..10.0, 1..20), k in 1e-3f64..1e3) {
        let scaled: Vec<f64> = v.iter().map(|x| x * k).collect();
        prop_assert_eq!(predict_label(&v).unwrap(), predict_label(&scaled).unwrap());
    }

    #[test]
    fn kl_with_onehot_is_n_times_cross_entropy(rows in simplex_rows(6, 10), seed in any::<u64>()) {
        let (n, c) = (rows.len(), rows[0].len());
        let pred = Tensor::from_vec(&[n, c], rows.concat()).unwrap();
        let mut y = Tensor::<f64>::zeros(&[n, c]);
        for i in 0..n {
            y.data_mut()[i * c + (seed as usize + 7 * i) % c] = 1.0;
        }
        let ce = cross_entropy_loss(&pred, &y).unwrap().value;
        let kl = kl_mixup_loss(&pred, &y, &[], 0.0).unwrap().value;
        prop_assert!(ce >= 0.0);
        prop_assert!((kl - n as f64 * ce).abs() < 1e-6);
    }

    #[test]
    fn patches_tile_at_stride(frames in 1usize..300, width in 1usize..64, overlap in 0.0f64..0.95) {
        prop_assume!(frames >= width);
        let spec = Spectrogram::new(
            FrontendKind::Mel, 2, frames, (0..2 * frames * 3).map(|i| i as f32).collect(),
        ).unwrap();
        let patches = split_patches(&spec, "s", width, overlap).unwrap();
        let stride = patch_stride(width, overlap);
        prop_assert_eq!(patches.len(), (frames - width) / stride + 1);
        for (i, p) in patches.iter().enumerate() {
            prop_assert_eq!(p.values[0], spec.get(0, i * stride, 0));
            prop_assert_eq!(p.values.len(), 2 * width * 3);
        }
    }

    #[test]
    fn wav_round_trip_within_one_lsb(samples in prop::collection::vec(-1.0f32..=1.0, 1..500)) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.wav");
        let clip = AudioClip::new("p", samples.clone(), 8_000).unwrap();
        write_wav_pcm16(&path, &clip).unwrap();
        let back = decode_wav(&std::fs::read(&path).unwrap(), "p").unwrap();
        prop_assert_eq!(back.samples.len(), samples.len());
        for (a, b) in samples.iter().zip(&back.samples) {
            prop_assert!((a - b).abs() <= 1.0 / 32_768.0);
        }
    }

    #[test]
    fn manifest_keeps_every_valid_row(labels in prop::collection::vec(0usize..3, 0..30)) {
        let set: Vec<String> = ["x", "y", "z"].iter().map(|s| s.to_string()).collect();
        let mut text = String::from("filename,scene_label\n");
        for (i, l) in labels.iter().enumerate() {
            text.push_str(&format!("f{i}.wav,{}\n", set[*l]));
        }
        let entries = parse_manifest(&text, &set).unwrap();
        prop_assert_eq!(entries.len(), labels.len());
    }

    #[test]
    fn mixup_labels_stay_distributions(lambda in 0.0f64..=1.0, a in 0usize..4, b in 0usize..4) {
        let mut y1 = Tensor::<f64>::zeros(&[1, 4]);
        let mut y2 = Tensor::<f64>::zeros(&[1, 4]);
        y1.data_mut()[a] = 1.0;
        y2.data_mut()[b] = 1.0;
        let x1 = Tensor::full(&[1, 2], 1.0);
        let x2 = Tensor::full(&[1, 2], -1.0);
        let (x, y) = mixup_batch(&x1, &x2, &y1, &y2, lambda).unwrap();
        prop_assert!((y.data().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!((x.data()[0] - (2.0 * lambda - 1.0)).abs() < 1e-12);
    }

    #[test]
    fn masks_stay_in_bounds(seed in any::<u64>(), bins in 4usize..20, frames in 4usize..20) {
        let cfg = SpecAugmentConfig {
            max_time_width: frames - 1,
            max_freq_width: bins - 1,
            fill: -7.0,
            ..SpecAugmentConfig::default()
        };
        let mut v = vec![1.0f32; bins * frames * 3];
        let bands = spec_augment(&mut v, [bins, frames, 3], &cfg, &mut ChaCha8Rng::seed_from_u64(seed));
        for band in &bands {
            let extent = if band.axis == Axis::Time { frames } else { bins };
            prop_assert!(band.start + band.width <= extent);
        }
        for b in 0..bins {
            for f in 0..frames {
                let masked = bands.iter().any(|band| {
                    let i = if band.axis == Axis::Time { f } else { b };
                    (band.start..band.start + band.width).contains(&i)
                });
                let want = if masked { -7.0 } else { 1.0 };
                prop_assert!(v[(b * frames + f) * 3..(b * frames + f + 1) * 3].iter().all(|&x| x == want));
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn filterbank_is_linear(alpha in 0.0f64..100.0, seed in any::<u64>()) {
        let cfg = FrontendConfig { fft_size: 256, window_size: 256, hop_size: 128, n_bins: 16, ..FrontendConfig::default() };
        let bank = mel_filterbank(&cfg, 16_000).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data: Vec<f64> = (0..129 * 3).map(|_| rand::Rng::random_range(&mut rng, 0.0..1.0)).collect();
        let x = Matrix::from_vec(129, 3, data);
        let a = bank.apply(&x.map(|v| alpha * v)).unwrap();
        let b = bank.apply(&x).unwrap().map(|v| alpha * v);
        for (p, q) in a.as_slice().iter().zip(b.as_slice()) {
            prop_assert!((p - q).abs() <= 1e-9 * (1.0 + q.abs()));
        }
    }

    #[test]
    fn delta_is_translation_equivariant(seed in any::<u64>(), shift in 1usize..5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = 40;
        let base: Vec<f64> = (0..n + shift).map(|_| rand::Rng::random_range(&mut rng, -1.0..1.0)).collect();
        let a = delta(&Matrix::from_vec(1, n, base[..n].to_vec()), 9);
        let b = delta(&Matrix::from_vec(1, n, base[shift..].to_vec()), 9);
        for t in 4 + shift..n - 4 {
            prop_assert!((a.get(0, t) - b.get(0, t - shift)).abs() < 1e-12);
        }
    }
}
