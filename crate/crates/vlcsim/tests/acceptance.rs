//! Acceptance gate: one test per release criterion, each printing a single
//! PASS/FAIL line (visible with `--nocapture`) before asserting.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use vlcsim::analysis::{check_corollary1, estimate_diversity_order, sep_qam_zf, sep_upper_bound, SepParams};
use vlcsim::channel::{dbm_to_linear, transmit, ChannelModel, Fading, LpfConfig};
use vlcsim::codec::{CodeParams, Constellation, Modulation};
use vlcsim::harness::{
    run_figure1, run_rate_report, run_sweep, run_sweep_serial, summarize, write_records,
    Figure1Config, OutputFormat, PowerSweep, ReceiverMode, Scheme, SimConfig, FEC_THRESHOLD,
};
use vlcsim::ofdm::{DcoOfdm, OfdmParams};
use vlcsim::receiver::{build_zf, zf_detect, SlicingMode};

fn verdict(id: u32, ok: bool, what: &str) {
    println!("criterion {id}: {} — {what}", if ok { "PASS" } else { "FAIL" });
    assert!(ok, "criterion {id} failed: {what}");
}

fn code(n: usize, m: usize, modulation: Modulation) -> CodeParams {
    CodeParams {
        n_layers: n,
        m_slots: m,
        slot_duration: 1e-8,
        modulation,
    }
}

fn flat_channel(n: usize, noise_power_dbm: f64) -> ChannelModel {
    ChannelModel {
        gains: vec![1.0; n],
        noise_power_dbm,
        clip_level_dbm: None,
        lpf: None,
        fading: Fading::Fixed,
        fading_covariance: None,
    }
}

#[test]
fn criterion_01_zf_identity_across_code_sizes() {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let sizes = [1usize, 2, 4, 8, 16, 32];
    let mut worst = 0.0f64;
    for &n in &sizes {
        for &m in &sizes {
            let params = code(n, m, Modulation::Ook);
            let eq = build_zf(&params);
            let t = vlcsim::codec::conv_matrix(&vec![1.0; m], n).unwrap();
            let product = &eq.pseudo_inverse * &t;
            for _ in 0..100 {
                let h: Vec<f64> = (0..n).map(|_| rng.gen_range(0.05..3.0)).collect();
                let diag = DMatrix::from_diagonal(&nalgebra::DVector::from_row_slice(&h));
                let err = (&product * &diag - &diag).abs().max();
                worst = worst.max(err);
            }
        }
    }
    verdict(
        1,
        worst <= 1e-9,
        &format!("ZF diagonalization residual {worst:.2e} <= 1e-9 for (N,M) in {{1..32}}^2"),
    );
}

#[test]
fn criterion_02_sep_closed_form_matches_monte_carlo() {
    let n = 4;
    let m = 4;
    let params = code(n, m, Modulation::SquareQam(4));
    let eq = build_zf(&params);
    let gains = vec![1.0; n];
    let mut rng = ChaCha8Rng::seed_from_u64(102);
    let mut ok = true;
    let mut detail = String::new();
    for snr_db in [8.0f64, 10.0, 12.0] {
        let es = dbm_to_linear(snr_db);
        let sep = SepParams::new(4, es, 1.0, &gains, m).unwrap();
        let constellation = Constellation::new(Modulation::SquareQam(4), es).unwrap();
        let chan = flat_channel(n, 0.0);
        let trials = 300_000usize; // 1.2e6 symbols per SNR point
        let mut errors = vec![0u64; n];
        let bps = constellation.bits_per_symbol();
        for _ in 0..trials {
            let bits: Vec<u8> = (0..n * bps).map(|_| rng.gen_range(0..2u8)).collect();
            let values: Vec<_> = bits
                .chunks(bps)
                .map(|c| constellation.map_bits(c).unwrap())
                .collect();
            let s = vlcsim::codec::SymbolVector {
                values: values.clone(),
                avg_symbol_energy: es,
            };
            let r = transmit(&s, &params, &chan, &mut rng, true).unwrap();
            let det = zf_detect(&r, &eq, SlicingMode::Genie(&gains), &constellation).unwrap();
            for k in 0..n {
                if det.symbol_estimates[k] != values[k] {
                    errors[k] += 1;
                }
            }
        }
        let mean_exact: f64 = (0..n)
            .map(|k| sep_qam_zf(&sep, k).unwrap())
            .sum::<f64>()
            / n as f64;
        assert!(
            (1e-3..1e-1).contains(&mean_exact),
            "pinned SNR point {snr_db} dB leaves the required SEP range: {mean_exact}"
        );
        for k in 0..n {
            let exact = sep_qam_zf(&sep, k).unwrap();
            let est = errors[k] as f64 / trials as f64;
            let stderr = (exact * (1.0 - exact) / trials as f64).sqrt();
            if (est - exact).abs() > 3.0 * stderr {
                ok = false;
                detail.push_str(&format!(
                    " [snr {snr_db} k {k}: mc {est:.4e} vs exact {exact:.4e}]"
                ));
            }
        }
    }
    verdict(
        2,
        ok,
        &format!("4x4 4-QAM SEP Monte Carlo within 3 stderr of the closed form{detail}"),
    );
}

#[test]
fn criterion_03_upper_bound_dominates_everywhere() {
    let mut rng = ChaCha8Rng::seed_from_u64(103);
    let mut violations = 0u64;
    for d in [4u32, 16, 64] {
        for _ in 0..20 {
            let n = rng.gen_range(1..=6);
            let m = rng.gen_range(1..=6);
            let h: Vec<f64> = (0..n).map(|_| rng.gen_range(0.1..2.5)).collect();
            for i in 0..40 {
                let es = dbm_to_linear(i as f64); // 0..39 dB SNR at sigma^2 = 1
                let sep = SepParams::new(d, es, 1.0, &h, m).unwrap();
                for k in 0..n {
                    if sep_upper_bound(&sep, k).unwrap() < sep_qam_zf(&sep, k).unwrap() {
                        violations += 1;
                    }
                }
            }
        }
    }
    verdict(
        3,
        violations == 0,
        &format!("{violations} dominance violations on the D x SNR x h grid"),
    );
}

#[test]
fn criterion_04_determinant_bound_and_homogeneity() {
    let mut rng = ChaCha8Rng::seed_from_u64(104);
    let mut ok = true;
    let mut checked = 0u64;
    for n in 1..=8 {
        for m in 1..=8 {
            for _ in 0..20 {
                let h: Vec<f64> = (0..n).map(|_| rng.gen_range(0.05..3.0)).collect();
                let report = check_corollary1(&h, m).unwrap();
                checked += 1;
                if !report.upper_holds || report.homogeneity_rel_err > 1e-10 {
                    ok = false;
                }
            }
        }
    }
    verdict(
        4,
        ok && checked >= 1000,
        &format!("det P <= (M/N)^N ||h||^2N and exact homogeneity over {checked} random h"),
    );
}

#[test]
fn criterion_05_diversity_slope_over_rayleigh_fading() {
    // Faithful restatement of the full-diversity claim: N = 2, M = 2, OOK,
    // i.i.d. Rayleigh-magnitude gains, genie ZF, slope fitted over 15-25 dB.
    let mut channel = flat_channel(2, 0.0);
    channel.fading = Fading::RayleighMagnitude;
    let cfg = SimConfig {
        scheme: Scheme::MlpsLstbc,
        code: code(2, 2, Modulation::Ook),
        channel,
        receiver_mode: ReceiverMode::ZfGenie,
        power_sweep_dbm: PowerSweep {
            start: 15.0,
            stop: 25.0,
            step: 2.0,
        },
        min_bit_errors: u64::MAX / 2,
        max_bits: 1_000_000,
        master_seed: 105,
        baud_per_led_hz: 100e6,
        ofdm: None,
    };
    let records = run_sweep(&cfg).unwrap();
    let points: Vec<(f64, f64)> = records.iter().map(|r| (r.snr_db, r.ber)).collect();
    let fit = estimate_diversity_order(&points).unwrap();
    verdict(
        5,
        fit.slope <= -1.6,
        &format!(
            "fitted log-log BER slope {:.3} (target <= -1.6 for nominal order 2)",
            fit.slope
        ),
    );
}

fn figure1_config() -> Figure1Config {
    let sweep = PowerSweep {
        start: 0.0,
        stop: 60.0,
        step: 4.0,
    };
    let channel = ChannelModel {
        gains: vec![1.0; 16],
        noise_power_dbm: -20.0,
        clip_level_dbm: Some(43.0),
        lpf: Some(LpfConfig {
            bandwidth_hz: 100e6,
            samples_per_slot: 8,
        }),
        fading: Fading::Fixed,
        fading_covariance: None,
    };
    let mlps = SimConfig {
        scheme: Scheme::MlpsLstbc,
        code: code(16, 16, Modulation::Ook),
        channel: channel.clone(),
        receiver_mode: ReceiverMode::ZfGenie,
        power_sweep_dbm: sweep,
        min_bit_errors: 100,
        max_bits: 100_000,
        master_seed: 106,
        baud_per_led_hz: 100e6,
        ofdm: None,
    };
    let mut ofdm_channel = channel;
    ofdm_channel.gains = vec![1.0];
    let ofdm = SimConfig {
        scheme: Scheme::DcoOfdm,
        code: code(1, 1, Modulation::Ook),
        channel: ofdm_channel,
        receiver_mode: ReceiverMode::ZfGenie,
        power_sweep_dbm: sweep,
        min_bit_errors: 100,
        max_bits: 100_000,
        master_seed: 106,
        baud_per_led_hz: 100e6,
        ofdm: Some(OfdmParams {
            n_subcarriers: 1024,
            n_guard: 4,
            n_null: 0,
            constellation_size: 256,
            dc_bias_db: 7.0,
            clip_level_dbm: None,
            sample_rate_hz: 4e8,
        }),
    };
    Figure1Config { mlps, ofdm }
}

#[test]
fn criterion_06_figure1_shape() {
    let cfg = figure1_config();
    let report = run_figure1(&cfg).unwrap();

    // (a) layered code: non-increasing up to the clip level (2-stderr
    // tolerance), minimum under the FEC limit, then a floor/rise.
    let clip = cfg.mlps.channel.clip_level_dbm.unwrap();
    let mut monotone = true;
    let pre_clip: Vec<_> = report.mlps.iter().filter(|r| r.power_dbm <= clip).collect();
    for pair in pre_clip.windows(2) {
        if pair[1].ber > pair[0].ber + 2.0 * (pair[0].ber_stderr + pair[1].ber_stderr) {
            monotone = false;
        }
    }
    let mlps_ok = monotone
        && report.mlps_summary.min_ber < FEC_THRESHOLD
        && report.mlps_summary.clip_onset_degraded
        && report.mlps.last().unwrap().ber >= 0.1;

    // (b) DCO-OFDM 256-QAM degrades at least 10x past the clip onset.
    let ofdm_ok = report.ofdm_summary.clip_onset_degraded;

    verdict(
        6,
        mlps_ok && ofdm_ok,
        &format!(
            "16x16 OOK min ber {:.2e} with post-clip rise ({}), OFDM 256-QAM degraded past clip ({})",
            report.mlps_summary.min_ber, mlps_ok, ofdm_ok
        ),
    );
}

#[test]
fn criterion_07_gigabit_rate_with_fec_margin() {
    let base = SimConfig {
        scheme: Scheme::MlpsLstbc,
        code: code(32, 32, Modulation::Ook),
        channel: flat_channel(32, -20.0),
        receiver_mode: ReceiverMode::ZfGenie,
        power_sweep_dbm: PowerSweep {
            start: 0.0,
            stop: 12.0,
            step: 4.0,
        },
        min_bit_errors: 100,
        max_bits: 200_000,
        master_seed: 107,
        baud_per_led_hz: 100e6,
        ofdm: None,
    };
    let reports = run_rate_report(&[(32, 32)], &base).unwrap();
    let hit = reports
        .iter()
        .any(|r| r.gross_data_rate_bps >= 1.5e9 && r.meets_fec);
    verdict(
        7,
        hit,
        &format!(
            "32x32 OOK gross rate {:.3} Gb/s, min ber {:.2e}, meets FEC: {}",
            reports[0].gross_data_rate_bps / 1e9,
            reports[0].min_ber,
            reports[0].meets_fec
        ),
    );
}

#[test]
fn criterion_08_mlse_never_worse_than_zf() {
    let mut ok = true;
    let mut detail = String::new();
    for m in [2usize, 3] {
        let zf_cfg = SimConfig {
            scheme: Scheme::MlpsLstbc,
            code: code(4, m, Modulation::Ook),
            channel: flat_channel(4, 0.0),
            receiver_mode: ReceiverMode::ZfGenie,
            power_sweep_dbm: PowerSweep {
                start: -4.0,
                stop: 4.0,
                step: 2.0,
            },
            min_bit_errors: 200,
            max_bits: 400_000,
            master_seed: 108,
            baud_per_led_hz: 100e6,
            ofdm: None,
        };
        let mut mlse_cfg = zf_cfg.clone();
        mlse_cfg.receiver_mode = ReceiverMode::Mlse;
        let zf = run_sweep(&zf_cfg).unwrap();
        let mlse = run_sweep(&mlse_cfg).unwrap();
        for (z, v) in zf.iter().zip(&mlse) {
            if v.ber > z.ber + 2.0 * (z.ber_stderr + v.ber_stderr) {
                ok = false;
                detail.push_str(&format!(
                    " [M={m} {} dBm: mlse {:.3e} > zf {:.3e}]",
                    z.power_dbm, v.ber, z.ber
                ));
            }
        }
    }
    verdict(
        8,
        ok,
        &format!("paired-seed MLSE <= ZF at every point for N=4, M in {{2,3}}{detail}"),
    );
}

#[test]
fn criterion_09_ofdm_roundtrip_and_filtered_ber() {
    let mut rng = ChaCha8Rng::seed_from_u64(109);
    let mut exact_ok = true;
    for d in [4u32, 16, 64, 256] {
        let ofdm = DcoOfdm::new(OfdmParams {
            n_subcarriers: 1024,
            n_guard: 4,
            n_null: 0,
            constellation_size: d,
            dc_bias_db: 7.0,
            clip_level_dbm: None,
            sample_rate_hz: 4e8,
        })
        .unwrap();
        let est = ofdm.genie_estimate(1.0, 1.0, None).unwrap();
        for _ in 0..1000 {
            let bits: Vec<u8> = (0..ofdm.bits_per_frame())
                .map(|_| rng.gen_range(0..2u8))
                .collect();
            let wave = ofdm.modulate(&bits, 1.0).unwrap();
            if ofdm.demodulate(&wave, &est).unwrap() != bits {
                exact_ok = false;
            }
        }
    }

    // Low-pass channel + genie one-tap equalization at 60 dB SNR.
    let cfg = SimConfig {
        scheme: Scheme::DcoOfdm,
        code: code(1, 1, Modulation::Ook),
        channel: ChannelModel {
            gains: vec![1.0],
            noise_power_dbm: -20.0,
            clip_level_dbm: None,
            lpf: Some(LpfConfig {
                bandwidth_hz: 100e6,
                samples_per_slot: 8,
            }),
            fading: Fading::Fixed,
            fading_covariance: None,
        },
        receiver_mode: ReceiverMode::ZfGenie,
        power_sweep_dbm: PowerSweep {
            start: 40.0,
            stop: 40.0,
            step: 1.0,
        },
        min_bit_errors: u64::MAX / 2,
        max_bits: 400_000,
        master_seed: 109,
        baud_per_led_hz: 100e6,
        ofdm: Some(OfdmParams {
            n_subcarriers: 1024,
            n_guard: 4,
            n_null: 0,
            constellation_size: 64,
            dc_bias_db: 7.0,
            clip_level_dbm: None,
            sample_rate_hz: 4e8,
        }),
    };
    let record = &run_sweep(&cfg).unwrap()[0];
    let filtered_ok = record.ber < 1e-4;
    verdict(
        9,
        exact_ok && filtered_ok,
        &format!(
            "bit-exact roundtrip over 1000 frames per order; filtered 60 dB SNR ber {:.2e}",
            record.ber
        ),
    );
}

#[test]
fn criterion_10_determinism_and_parallel_equivalence() {
    let cfg = SimConfig {
        scheme: Scheme::MlpsLstbc,
        code: code(2, 2, Modulation::Ook),
        channel: flat_channel(2, -20.0),
        receiver_mode: ReceiverMode::ZfGenie,
        power_sweep_dbm: PowerSweep {
            start: -16.0,
            stop: -8.0,
            step: 2.0,
        },
        min_bit_errors: 100,
        max_bits: 50_000,
        master_seed: 110,
        baud_per_led_hz: 100e6,
        ofdm: None,
    };
    let a = run_sweep(&cfg).unwrap();
    let b = run_sweep(&cfg).unwrap();
    let c = run_sweep_serial(&cfg).unwrap();
    let bytes = |records: &[vlcsim::harness::BerRecord]| {
        let mut out = Vec::new();
        write_records(records, OutputFormat::Csv, &mut out).unwrap();
        out
    };
    let ok = a == b && a == c && bytes(&a) == bytes(&b) && bytes(&a) == bytes(&c);
    // The curve digest must also be stable across summarization.
    let s1 = summarize(&a, None).unwrap();
    let s2 = summarize(&c, None).unwrap();
    verdict(
        10,
        ok && s1 == s2,
        "repeated, serial, and parallel runs emit identical bytes",
    );
}
