// SPDX-License-Identifier: Apache-2.0

use agemon::analytics::score::score_payloads;
use agemon::analytics::{cross_device_stats, degradation_step, MefPoint, MefSeries, PayloadFeatures};
use agemon::config::CampaignConfig;
use agemon::controller::{Controller, SearchConfig};
use agemon::device::{FlashBuffering, SimulatedDevice};
use agemon::payloads::image::FlashImage;
use agemon::payloads::matrix::determinant;
use agemon::payloads::md5::Md5;
use agemon::payloads::{ErrorTransitionModel, Payload, PayloadKind, TimingModel, TransitionShape};
use agemon::physics::{AgeingState, MobilityModel};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn image() -> &'static FlashImage {
    static IMG: std::sync::OnceLock<FlashImage> = std::sync::OnceLock::new();
    IMG.get_or_init(|| FlashImage::generate(7, 0x2000).unwrap())
}

fn device(seed: u64, temperature: f64, ageing: AgeingState) -> SimulatedDevice {
    let c = CampaignConfig::default();
    let mut d = SimulatedDevice::new("p", &c.device_description(), image().bytes.clone(), seed).unwrap();
    d.set_temperature(temperature).unwrap();
    d.set_ageing(ageing).unwrap();
    d
}

fn payload_kind() -> impl Strategy<Value = PayloadKind> {
    prop::sample::select(PayloadKind::ALL.to_vec())
}

fn buffering() -> impl Strategy<Value = FlashBuffering> {
    prop::sample::select(FlashBuffering::BOTH.to_vec())
}

fn ageing() -> impl Strategy<Value = AgeingState> {
    (0.0..0.2f64, 0.75..=1.0f64).prop_map(|(dv, m)| AgeingState::new(dv, m).unwrap())
}

fn hard_edge() -> ErrorTransitionModel {
    ErrorTransitionModel {
        onset_fraction: 1.0,
        shape: TransitionShape::Smoothstep,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn mobility_decreases_with_temperature(t in 250.0..399.0f64, dt in 0.1..1.0f64) {
        let m = MobilityModel::default();
        prop_assert!(m.effective_mobility(t + dt).unwrap() < m.effective_mobility(t).unwrap());
    }

    #[test]
    fn path_limits_fall_with_temperature_and_ageing(
        seed in any::<u64>(), t in 20.0..79.0f64, a in ageing(), cfg in buffering()
    ) {
        let fresh = device(seed, t, AgeingState::FRESH);
        let hotter = device(seed, t + 1.0, AgeingState::FRESH);
        let aged = device(seed, t, a);
        for i in 0..fresh.paths().len() {
            let dc = fresh.config(cfg);
            let f = fresh.path_max_frequency(i, &dc).unwrap();
            prop_assert!(hotter.path_max_frequency(i, &dc).unwrap() < f);
            prop_assert!(aged.path_max_frequency(i, &dc).unwrap() <= f);
        }
    }

    #[test]
    fn timing_violation_is_monotone_in_clock(seed in any::<u64>(), t in 20.0..80.0f64, f1 in 1e6..300e6f64, f2 in 1e6..300e6f64) {
        let d = device(seed, t, AgeingState::FRESH);
        let dc = d.config(FlashBuffering::Unbuffered);
        let (lo, hi) = if f1 < f2 { (f1, f2) } else { (f2, f1) };
        for i in 0..d.paths().len() {
            if d.violates_timing(i, &dc, lo).unwrap() {
                prop_assert!(d.violates_timing(i, &dc, hi).unwrap());
            }
            let fmax = d.path_max_frequency(i, &dc).unwrap();
            prop_assert!(!d.violates_timing(i, &dc, fmax).unwrap());
        }
    }

    #[test]
    fn bisection_equals_sweep_on_coarse_grids(
        seed in any::<u64>(), t in 20.0..80.0f64, a in ageing(), kind in payload_kind(), cfg in buffering(),
        step in 0.2e6..3e6f64, f_max in 120e6..260e6f64,
    ) {
        let search = SearchConfig { f_min: 1e6, f_max, step, runs_per_frequency: 1, watchdog_timeout: 0.05 };
        let d = device(seed, t, a);
        let dc = d.config(cfg);
        let payload = Payload::standard(kind);
        let mut controller = Controller::new(search, hard_edge(), TimingModel::default()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut searched = d.clone();
        let outcome = controller.find_mef(&mut searched, &payload, &dc, &mut rng).unwrap();
        let oracle = controller.sweep_oracle_mef(&mut d.clone(), &payload, &dc, &mut rng).unwrap();
        prop_assert_eq!(outcome.mef, oracle);
        prop_assert!(outcome.trace.len() as u32 <= search.probe_budget());

        // Ground truth: highest grid point not above the governing limit.
        let limit = d.device_mef_oracle(payload.activated_subsystems, &dc).unwrap();
        let expected = search.grid().into_iter().rev().find(|f| *f <= limit).unwrap();
        prop_assert_eq!(outcome.mef, expected);

        // No error-free probe above an erroneous one.
        let lowest_bad = outcome.trace.iter().filter(|r| !r.is_error_free()).map(|r| r.frequency).fold(f64::INFINITY, f64::min);
        prop_assert!(outcome.trace.iter().filter(|r| r.is_error_free()).all(|r| r.frequency < lowest_bad));

        // The search leaves the device usable at standby.
        prop_assert!(!searched.is_hung());
        let standby = searched.guard_band_frequency().min(outcome.mef);
        let check = controller.run_at_frequency(&mut searched, &payload, &dc, standby, 3, &mut rng);
        prop_assert_eq!(check.passes, 3);
    }

    #[test]
    fn stats_match_order_statistics(values in prop::collection::vec(-1e9..1e9f64, 1..60)) {
        let s = cross_device_stats(&values).unwrap();
        let mut sorted = values.clone();
        sorted.sort_by(f64::total_cmp);
        let q = |p: f64| {
            let h = (sorted.len() - 1) as f64 * p;
            let (lo, hi) = (h.floor() as usize, h.ceil() as usize);
            sorted[lo] + (h - h.floor()) * (sorted[hi] - sorted[lo])
        };
        prop_assert!((s.median - q(0.5)).abs() <= 1e-9 * (1.0 + q(0.5).abs()));
        prop_assert!((s.q1 - q(0.25)).abs() <= 1e-9 * (1.0 + q(0.25).abs()));
        prop_assert!((s.q3 - q(0.75)).abs() <= 1e-9 * (1.0 + q(0.75).abs()));
        prop_assert!(s.q1 <= s.median && s.median <= s.q3);
        if sorted.len() % 2 == 1 {
            prop_assert_eq!(s.median, sorted[sorted.len() / 2]);
        }
    }

    #[test]
    fn degradation_is_scale_free(mefs in prop::collection::vec(1e6..2e8f64, 2..9), c in 1e-3..1e3f64) {
        let series = |scale: f64| {
            let points = mefs.iter().enumerate().map(|(i, m)| MefPoint { temperature_c: i as f64, mef_hz: m * scale }).collect();
            MefSeries::new("s", PayloadKind::CpuTest, FlashBuffering::Unbuffered, points).unwrap()
        };
        let (a, b) = (series(1.0), series(c));
        for i in 1..mefs.len() {
            let tol = 1e-12 * (mefs[i - 1] + mefs[i]) / mefs[0] * 100.0;
            prop_assert!((degradation_step(&a, i).unwrap() - degradation_step(&b, i).unwrap()).abs() <= tol);
        }
    }

    #[test]
    fn scores_are_pure_and_symmetric(vals in prop::collection::vec((1e6..2e8f64, 1e-6..1e-2f64, any::<bool>()), 10)) {
        let feats: Vec<PayloadFeatures> = PayloadKind::ALL.iter().enumerate().flat_map(|(i, k)| {
            let vals = &vals;
            FlashBuffering::BOTH.iter().enumerate().map(move |(j, c)| {
                let (m, t, tr) = vals[2 * i + j];
                PayloadFeatures { payload: *k, config: *c, mef_hz: m, exec_time_s: t, has_transition: tr }
            })
        }).collect();
        let a = score_payloads(&feats).unwrap();
        let mut reversed = feats.clone();
        reversed.reverse();
        prop_assert_eq!(&a, &score_payloads(&reversed).unwrap());
        for s in &a {
            for v in [s.mef_score, s.execution_time_score, s.error_transition_score] {
                prop_assert!((0.0..=3.0).contains(&v) && (v * 2.0).fract() == 0.0);
            }
        }
        // Identical features give identical scores.
        let twin: Vec<PayloadFeatures> = feats.iter().map(|f| PayloadFeatures { mef_hz: 5e7, exec_time_s: 1e-4, has_transition: true, ..*f }).collect();
        let t = score_payloads(&twin).unwrap();
        prop_assert!(t.windows(2).all(|w| (w[0].mef_score, w[0].execution_time_score) == (w[1].mef_score, w[1].execution_time_score)));
    }

    #[test]
    fn md5_matches_reference_crate(data in prop::collection::vec(any::<u8>(), 0..600), cut in any::<prop::sample::Index>()) {
        use md5::Digest as _;
        let expected: [u8; 16] = md5::Md5::digest(&data).into();
        let split = cut.index(data.len() + 1);
        let mut h = Md5::new();
        h.update(&data[..split]);
        h.update(&data[split..]);
        prop_assert_eq!(h.finalize(), expected);
    }

    #[test]
    fn bareiss_matches_cofactor_expansion(n in 1usize..6, entries in prop::collection::vec(-9i128..=9, 36)) {
        let m: Vec<Vec<i128>> = (0..n).map(|i| entries[i * n..i * n + n].to_vec()).collect();
        prop_assert_eq!(determinant(&m), Some(cofactor(&m)));
    }

    #[test]
    fn config_echo_round_trips(
        devices in 1u32..20, seed in 0u64..1_000_000, runs in 1u32..1000, ci in any::<bool>(),
        onset in 1.0..1.2f64, variation in 0.0..0.05f64,
    ) {
        let mut c = CampaignConfig { device_count: devices, master_seed: seed, ci_mode: ci, ..CampaignConfig::default() };
        c.search.runs_per_frequency = runs;
        c.transition.onset_fraction = onset;
        c.device.process_variation = variation;
        let back = CampaignConfig::from_toml(&c.to_toml()).unwrap();
        prop_assert_eq!(&back, &c);
        prop_assert_eq!(back.to_toml(), c.to_toml());
    }
}

fn cofactor(m: &[Vec<i128>]) -> i128 {
    if m.len() == 1 {
        return m[0][0];
    }
    (0..m.len())
        .map(|c| {
            let minor: Vec<Vec<i128>> = m[1..]
                .iter()
                .map(|r| r.iter().enumerate().filter(|(j, _)| *j != c).map(|(_, v)| *v).collect())
                .collect();
            (if c % 2 == 0 { 1 } else { -1 }) * m[0][c] * cofactor(&minor)
        })
        .sum()
}
