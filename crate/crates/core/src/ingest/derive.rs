use super::RawCounters;
use crate::roofline::{CounterVector, Metric};

/// Bytes per GB and FLOPs per GFLOP.
pub const GIGA: f64 = 1e9;

/// Computes the twelve metrics from low-level counters.
///
/// Metrics whose denominator is zero (intensity with no bytes at a level, hit
/// rate with no requests) are left out of the result.
pub fn derive_metrics(raw: &RawCounters) -> CounterVector {
    let mut out = CounterVector::new();
    let mut put = |m: Metric, v: f64| {
        // inputs are validated at ingestion; a failure here means a NaN slipped in
        if out.set(m, v).is_err() {
            tracing::warn!(metric = %m, value = v, "dropping invalid derived value");
        }
    };
    let gflops = raw.flops / raw.duration_s / GIGA;
    let hbm_bytes = raw.hbm_read_bytes + raw.hbm_write_bytes;
    for (ai, gf, bytes) in [
        (Metric::L1ArithmeticIntensity, Metric::L1Gflops, raw.l1_bytes),
        (Metric::L2ArithmeticIntensity, Metric::L2Gflops, raw.l2_bytes),
        (Metric::HbmArithmeticIntensity, Metric::HbmGflops, hbm_bytes),
    ] {
        if bytes > 0.0 {
            put(ai, raw.flops / bytes);
        }
        put(gf, gflops);
    }
    put(Metric::L1Bandwidth, raw.l1_bytes / raw.duration_s / GIGA);
    put(Metric::L2Bandwidth, raw.l2_bytes / raw.duration_s / GIGA);
    put(Metric::FabricReadBandwidth, raw.hbm_read_bytes / raw.duration_s / GIGA);
    put(Metric::FabricWriteBandwidth, raw.hbm_write_bytes / raw.duration_s / GIGA);
    if raw.l1_requests > 0.0 {
        put(Metric::L1HitRate, raw.l1_hits / raw.l1_requests * 100.0);
    }
    if raw.l2_requests > 0.0 {
        put(Metric::L2HitRate, raw.l2_hits / raw.l2_requests * 100.0);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn listing_scale() -> RawCounters {
        RawCounters {
            flops: 2.05056e5,
            l1_bytes: 1.640448e6,
            l2_bytes: 1.640448e6,
            hbm_read_bytes: 820224.0,
            hbm_write_bytes: 820224.0,
            duration_s: 1e-6,
            l1_requests: 1000.0,
            l1_hits: 500.0,
            l2_requests: 400.0,
            l2_hits: 400.0,
        }
    }

    #[test]
    fn listing_scale_numbers() {
        let m = derive_metrics(&listing_scale());
        assert_eq!(m.get(Metric::HbmArithmeticIntensity), Some(0.125));
        assert!((m.get(Metric::HbmGflops).unwrap() - 205.056).abs() < 1e-9);
        assert_eq!(m.get(Metric::L2HitRate), Some(100.0));
        assert_eq!(m.get(Metric::L1HitRate), Some(50.0));
        assert!(m.is_complete());
    }

    #[test]
    fn zero_flops_and_zero_bytes() {
        let mut raw = listing_scale();
        raw.flops = 0.0;
        let m = derive_metrics(&raw);
        for metric in
            [Metric::L1Gflops, Metric::HbmGflops, Metric::L1ArithmeticIntensity, Metric::HbmArithmeticIntensity]
        {
            assert_eq!(m.get(metric), Some(0.0));
        }
        raw.l2_bytes = 0.0;
        raw.l2_requests = 0.0;
        let m = derive_metrics(&raw);
        assert_eq!(m.get(Metric::L2ArithmeticIntensity), None);
        assert_eq!(m.get(Metric::L2HitRate), None);
        assert_eq!(m.get(Metric::L2Bandwidth), Some(0.0));
    }

    proptest! {
        #[test]
        fn intensity_times_bandwidth_is_gflops(
            flops in 0.0f64..1e15, l1 in 1.0f64..1e13, l2 in 1.0f64..1e13, dur in 1e-7f64..10.0,
        ) {
            let raw = RawCounters { flops, l1_bytes: l1, l2_bytes: l2, duration_s: dur, ..listing_scale() };
            let m = derive_metrics(&raw);
            for (ai, bw, gf) in [
                (Metric::L1ArithmeticIntensity, Metric::L1Bandwidth, Metric::L1Gflops),
                (Metric::L2ArithmeticIntensity, Metric::L2Bandwidth, Metric::L2Gflops),
            ] {
                let lhs = m.get(ai).unwrap() * m.get(bw).unwrap();
                let rhs = m.get(gf).unwrap();
                prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs.abs().max(1e-300) + 1e-300);
            }
        }
    }
}
