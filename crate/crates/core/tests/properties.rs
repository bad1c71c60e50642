use proptest::prelude::*;

use chinpoint_core::analytics::{
    effective_id, fit_fitts, midranks, nominal_id, rank_sum, signed_rank, throughput, ZeroMethod,
};
use chinpoint_core::wire::{decode_frame, encode_frame, SensorFrame, StreamDecoder, FRAME_LEN};
use chinpoint_core::CalibrationProfile;

fn frame() -> impl Strategy<Value = SensorFrame> {
    (
        any::<u16>(),
        any::<u16>(),
        any::<i16>(),
        any::<i16>(),
        any::<i16>(),
        0u16..=1023,
        any::<bool>(),
    )
        .prop_map(|(seq, t, ax, ay, az, stretch, button)| SensorFrame {
            seq,
            t_ms: t as u32,
            ax,
            ay,
            az,
            stretch,
            button,
        })
}

fn pairs() -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((0.5f64..6.0, 0.2f64..20.0), 3..60).prop_filter("IDe must vary", |v| {
        v.iter().any(|p| (p.0 - v[0].0).abs() > 1e-3)
    })
}

proptest! {
    #[test]
    fn effective_id_monotone(de in 0.0f64..1000.0, extra in 0.01f64..100.0, sd in 0.1f64..50.0, k in 1.01f64..4.0) {
        let base = effective_id(de, sd).unwrap();
        prop_assert!(effective_id(de + extra, sd).unwrap() > base);
        if de > 0.0 {
            prop_assert!(effective_id(de, sd * k).unwrap() < base);
        }
        prop_assert!(base >= 0.0);
    }

    #[test]
    fn nominal_id_scale_free(d in 0.0f64..1000.0, w in 0.5f64..100.0, k in 0.1f64..10.0) {
        let a = nominal_id(d, w).unwrap();
        let b = nominal_id(d * k, w * k).unwrap();
        prop_assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn throughput_scales_inversely_with_time(grid in prop::collection::vec(prop::collection::vec((0.5f64..6.0, 0.2f64..20.0), 6), 1..10), k in 0.1f64..10.0) {
        let tp = throughput(&grid).unwrap();
        let slower: Vec<Vec<(f64, f64)>> = grid.iter().map(|r| r.iter().map(|&(i, t)| (i, t * k)).collect()).collect();
        let tp_k = throughput(&slower).unwrap();
        prop_assert!((tp_k * k - tp).abs() <= 1e-12 * tp.max(1.0));
    }

    #[test]
    fn regression_residuals_sum_to_zero(p in pairs()) {
        let fit = fit_fitts(&p).unwrap();
        let scale = p.iter().map(|q| q.1.abs()).sum::<f64>();
        let resid: f64 = p.iter().map(|&(x, y)| y - fit.a - fit.b * x).sum();
        prop_assert!(resid.abs() <= 1e-9 * scale.max(1.0));
        let xres: f64 = p.iter().map(|&(x, y)| x * (y - fit.a - fit.b * x)).sum();
        prop_assert!(xres.abs() <= 1e-8 * scale.max(1.0));
    }

    #[test]
    fn regression_affine_in_y(p in pairs(), alpha in 0.1f64..5.0, beta in -5.0f64..5.0) {
        let fit = fit_fitts(&p).unwrap();
        let q: Vec<(f64, f64)> = p.iter().map(|&(x, y)| (x, alpha * y + beta)).collect();
        let g = fit_fitts(&q).unwrap();
        prop_assert!((g.b - alpha * fit.b).abs() <= 1e-8 * (1.0 + fit.b.abs() * alpha));
        prop_assert!((g.a - (alpha * fit.a + beta)).abs() <= 1e-8 * (1.0 + fit.a.abs() * alpha + beta.abs()));
        prop_assert!((g.r_squared - fit.r_squared).abs() <= 1e-9);
    }

    #[test]
    fn regression_shift_in_x(p in pairs(), c in -3.0f64..3.0) {
        let fit = fit_fitts(&p).unwrap();
        let q: Vec<(f64, f64)> = p.iter().map(|&(x, y)| (x + c, y)).collect();
        let g = fit_fitts(&q).unwrap();
        prop_assert!((g.b - fit.b).abs() <= 1e-8 * (1.0 + fit.b.abs()));
        prop_assert!((g.a - (fit.a - fit.b * c)).abs() <= 1e-7 * (1.0 + fit.a.abs() + fit.b.abs()));
    }

    #[test]
    fn f_statistic_identity(p in pairs()) {
        let fit = fit_fitts(&p).unwrap();
        prop_assume!(fit.r_squared < 0.999);
        let n = p.len() as f64;
        let f = fit.r_squared / (1.0 - fit.r_squared) * (n - 2.0);
        prop_assert!((fit.f_stat - f).abs() <= 1e-9 * f.max(1.0));
        prop_assert_eq!(fit.df, (1, p.len() - 2));
        prop_assert!((0.0..=1.0).contains(&fit.p_value));
    }

    #[test]
    fn midranks_sum(v in prop::collection::vec(-5i32..5, 1..40)) {
        let x: Vec<f64> = v.iter().map(|&i| i as f64).collect();
        let (r, _) = midranks(&x);
        let n = x.len() as f64;
        prop_assert!((r.iter().sum::<f64>() - n * (n + 1.0) / 2.0).abs() < 1e-9);
    }

    #[test]
    fn rank_sum_invariant_under_monotone_map(
        x in prop::collection::vec(-10.0f64..10.0, 1..25),
        y in prop::collection::vec(-10.0f64..10.0, 1..25),
    ) {
        let f = |v: &[f64]| v.iter().map(|t| (t / 4.0).exp() * 3.0 + 1.0).collect::<Vec<_>>();
        let a = rank_sum(&x, &y).unwrap();
        let b = rank_sum(&f(&x), &f(&y)).unwrap();
        prop_assert!((a.p_value - b.p_value).abs() < 1e-12);
        prop_assert!((a.statistic - b.statistic).abs() < 1e-9);
        // Swapping the samples does not change a two-sided p-value.
        let c = rank_sum(&y, &x).unwrap();
        prop_assert!((a.p_value - c.p_value).abs() < 1e-12);
    }

    #[test]
    fn signed_rank_invariant_under_scaling(d in prop::collection::vec(-10.0f64..10.0, 1..30), k in 0.1f64..10.0) {
        prop_assume!(d.iter().any(|&v| v != 0.0));
        let zeros = vec![0.0; d.len()];
        let scaled: Vec<f64> = d.iter().map(|v| v * k).collect();
        let a = signed_rank(&d, &zeros, ZeroMethod::Drop).unwrap();
        let b = signed_rank(&scaled, &zeros, ZeroMethod::Drop).unwrap();
        prop_assert!((a.p_value - b.p_value).abs() < 1e-12);
        prop_assert!((0.0..=1.0).contains(&a.p_value));
    }

    #[test]
    fn wire_round_trip(f in frame()) {
        let bytes = encode_frame(&f).unwrap();
        prop_assert_eq!(decode_frame(&bytes).unwrap(), f);
    }

    #[test]
    fn any_single_byte_corruption_is_rejected(f in frame(), at in 2usize..FRAME_LEN, mask in 1u8..=255) {
        let mut bytes = encode_frame(&f).unwrap();
        bytes[at] ^= mask;
        prop_assert!(decode_frame(&bytes).is_err());
    }

    #[test]
    fn chunking_does_not_change_decoding(fs in prop::collection::vec(frame(), 1..40), cut in 1usize..50) {
        let mut bytes = Vec::new();
        let fs: Vec<SensorFrame> = fs.into_iter().enumerate().map(|(i, mut f)| { f.seq = i as u16; f.t_ms = i as u32 * 10; f }).collect();
        for f in &fs {
            bytes.extend_from_slice(&encode_frame(f).unwrap());
        }
        let mut dec = StreamDecoder::new();
        let mut out = Vec::new();
        for chunk in bytes.chunks(cut) {
            dec.push_into(chunk, &mut out);
        }
        prop_assert_eq!(out, fs);
        prop_assert_eq!(dec.stats().crc_failures, 0);
    }

    #[test]
    fn garbage_never_panics(bytes in prop::collection::vec(any::<u8>(), 0..512)) {
        let mut dec = StreamDecoder::new();
        let out = dec.push(&bytes);
        prop_assert!(out.iter().all(|f| f.stretch <= 1023));
    }

    #[test]
    fn profile_text_round_trip(press in 400.0f64..900.0, gap in 1.0f64..300.0, speed in 10.0f64..2000.0, debounce in 0u32..500) {
        let p = CalibrationProfile {
            stretch_press: press,
            stretch_release: press - gap,
            stretch_press_down: press - gap - 50.0,
            speed_xy: speed,
            debounce_ms: debounce,
            ..Default::default()
        };
        p.validate().unwrap();
        prop_assert_eq!(CalibrationProfile::from_text(&p.to_text()).unwrap(), p);
    }
}
