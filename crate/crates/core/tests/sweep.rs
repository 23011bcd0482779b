use std::sync::OnceLock;

use nfsplit::array::SystemConfig;
use nfsplit::design::DesignInputs;
use nfsplit::harness::{preset_inputs, run_sweep, ExperimentSpec, SweepResult};
use nfsplit::training::Scheme;

const SNRS: [f64; 4] = [5.0, 10.0, 15.0, 20.0];

fn desk_sweep() -> &'static SweepResult {
    static RESULT: OnceLock<SweepResult> = OnceLock::new();
    RESULT.get_or_init(|| {
        let mut spec = ExperimentSpec::snr_sweep(preset_inputs(false), SNRS.to_vec(), 500, 99);
        spec.schemes.retain(|&s| s != Scheme::Exhaustive);
        run_sweep(&spec).unwrap()
    })
}

#[test]
fn identical_across_thread_counts() {
    let cfg = SystemConfig::new(32, 10e9, 1e9, 64).unwrap();
    let mut spec = ExperimentSpec::snr_sweep(DesignInputs::new(cfg, 1.0), vec![0.0, 15.0], 12, 5);
    spec.bank_dims = (32, 4);
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| run_sweep(&spec).unwrap())
    };
    let a = run(1);
    let b = run(4);
    assert_eq!(a.points, b.points);
    assert_eq!(a.spec_hash, b.spec_hash);
}

#[test]
fn standard_error_shrinks_with_trials() {
    let se = |n| {
        let mut spec = ExperimentSpec::snr_sweep(preset_inputs(false), vec![10.0], n, 3);
        spec.schemes = vec![Scheme::OnGrid];
        run_sweep(&spec).unwrap().point(Scheme::OnGrid, 10.0).unwrap().std_error
    };
    let ratio = se(100) / se(400);
    assert!((ratio - 2.0).abs() <= 0.4, "SE ratio {ratio}");
}

#[test]
fn rates_do_not_fall_with_snr() {
    let res = desk_sweep();
    for s in Scheme::ALL.iter().filter(|&&s| s != Scheme::Exhaustive) {
        for w in SNRS.windows(2) {
            let (lo, hi) = (res.mean(*s, w[0]), res.mean(*s, w[1]));
            assert!(hi >= lo * 0.995, "{s}: {lo} at {} dB, {hi} at {} dB", w[0], w[1]);
        }
    }
}

#[test]
fn match_filter_leads_on_grid_at_low_snr() {
    let res = desk_sweep();
    let (mf, grid) = (res.mean(Scheme::MatchFilter, 5.0), res.mean(Scheme::OnGrid, 5.0));
    assert!(mf >= grid * 0.995, "match {mf} on-grid {grid}");
}

#[test]
fn split_beams_keep_up_with_ring_sweep() {
    let res = desk_sweep();
    let mf = res.point(Scheme::MatchFilter, 15.0).unwrap();
    let ring = res.point(Scheme::NearFieldRainbow, 15.0).unwrap();
    assert!(mf.pilots_used <= ring.pilots_used);
    assert!(
        mf.mean_rate >= 0.95 * ring.mean_rate,
        "match {} rainbow {}",
        mf.mean_rate,
        ring.mean_rate
    );
}

#[test]
fn sweep_outputs_parse_back() {
    let cfg = SystemConfig::new(16, 10e9, 1e9, 32).unwrap();
    let mut spec = ExperimentSpec::snr_sweep(DesignInputs::new(cfg, 1.0), vec![10.0], 4, 1);
    spec.bank_dims = (16, 3);
    let text = serde_json::to_string(&spec).unwrap();
    assert_eq!(ExperimentSpec::from_json(&text).unwrap(), spec);
    let res = run_sweep(&spec).unwrap();
    let json = serde_json::to_string(&res).unwrap();
    let back: SweepResult = serde_json::from_str(&json).unwrap();
    assert_eq!(back, res);
    assert_eq!(res.to_csv().lines().count(), 1 + Scheme::ALL.len());
}
