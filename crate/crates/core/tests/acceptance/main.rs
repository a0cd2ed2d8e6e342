//! Acceptance suite. Every criterion prints one PASS or FAIL line; the
//! process exits non-zero when any criterion fails.
//!
//! Pass a substring of a criterion key as an argument to run a subset, e.g.
//! `cargo test --test acceptance -- gradient`.

mod cli;
mod geometry;
mod gradient;
mod learning;
mod pipeline;
mod store;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

fn gradient_check() -> Verdict {
    let t = Instant::now();
    let g = gradient::run(17);
    let secs = t.elapsed().as_secs_f64();
    let worst: Vec<String> = g.worst.iter().map(|(n, e)| format!("{n} {e:.1e}")).collect();
    let s = g.stats;
    verdict(
        g.failures == 0 && s.unresolved == 0 && g.forward_mismatch < 1e-9 && secs < 120.0,
        format!(
            "{} parameters x {} samples, step {:e}; max relative error per tensor: {}; {} failures; stencils central {} one-sided {} first-order {} unresolved {}; oracle forward mismatch {:.1e}; {:.1} s (limit 120 s)",
            g.parameters,
            gradient::SAMPLES,
            gradient::STEP,
            worst.join(", "),
            g.failures,
            s.central,
            s.one_sided,
            s.first_order,
            s.unresolved,
            g.forward_mismatch,
            secs
        ),
    )
}

fn pose_oracle() -> Verdict {
    let t = Instant::now();
    let o = geometry::pose_oracle(1000, 3);
    let secs = t.elapsed().as_secs_f64();
    verdict(
        o.passed * 100 >= o.trials * 99 && secs < 60.0,
        format!(
            "{}/{} poses within 1e-4 deg and 1e-3 mm (need 99%); worst {:.2e} deg, {:.2e} mm; {:.1} s (limit 60 s)",
            o.passed, o.trials, o.worst_rotation_deg, o.worst_translation_mm, secs
        ),
    )
}

fn normalization() -> Verdict {
    let o = geometry::normalization_conditions(1000, 4);
    verdict(
        o.max_axis_rad < 1e-6 && o.max_center_px < 0.5 && o.max_rendered_center_px < 0.5 && o.max_roll < 1e-9,
        format!(
            "{} eyes: max axis angle {:.1e} rad (< 1e-6), max center offset {:.1e} px geometric / {:.3} px rendered (< 0.5), max roll {:.1e} (< 1e-9)",
            o.eyes, o.max_axis_rad, o.max_center_px, o.max_rendered_center_px, o.max_roll
        ),
    )
}

fn end_to_end() -> Verdict {
    let t = Instant::now();
    let r = pipeline::run(&pipeline::noise_free_config());
    let secs = t.elapsed().as_secs_f64();
    verdict(
        r.mean_deg < 0.3 && r.dropped == 0 && secs < 300.0,
        format!(
            "{} records, {} samples, {} dropped; mean error {:.2e} deg (< 0.3), max {:.2e} deg, vs sidecar {:.2e} deg; {:.1} s (limit 300 s)",
            r.records, r.samples, r.dropped, r.mean_deg, r.max_deg, r.sidecar_mean_deg, secs
        ),
    )
}

fn learning_ordering() -> Verdict {
    let t = Instant::now();
    let o = learning::ordering();
    let secs = t.elapsed().as_secs_f64();
    let (c, k, m) = (o.cnn.grand_mean_deg, o.knn.grand_mean_deg, o.mean.grand_mean_deg);
    verdict(
        c < k && k < m && c < 5.0 && secs < 1800.0,
        format!(
            "6 persons x 1000 records ({} samples), quota {} per eye; LOPO grand means: cnn {c:.3} (std {:.3}), knn {k:.3} (std {:.3}), mean {m:.3} (std {:.3}) deg; need cnn < knn < mean and cnn < 5; {:.0} s (limit 1800 s)",
            o.samples,
            learning::BENCHMARK_QUOTA,
            o.cnn.std_deg,
            o.knn.std_deg,
            o.mean.std_deg,
            secs
        ),
    )
}

fn domain_gap() -> Verdict {
    let g = learning::domain_gap();
    verdict(
        g.a_to_b > g.lopo_b && g.b_to_a > g.lopo_a,
        format!(
            "cnn: A->B {:.3} vs LOPO B {:.3}; B->A {:.3} vs LOPO A {:.3} deg (cross must exceed LOPO on the test store)",
            g.a_to_b, g.lopo_b, g.b_to_a, g.lopo_a
        ),
    )
}

fn mirror_store() -> Verdict {
    let r = store::run(10_000, 8);
    verdict(
        r.involution_mismatches == 0 && r.mirror_changed_all && r.store_mismatches == 0 && r.mirrored_store_mismatches == 0,
        format!(
            "{} samples: involution mismatches {}, mirror flips side and yaw {}, store round-trip mismatches {} (mirrored {})",
            r.samples, r.involution_mismatches, r.mirror_changed_all, r.store_mismatches, r.mirrored_store_mismatches
        ),
    )
}

fn determinism() -> Verdict {
    let differing = cli::determinism();
    verdict(
        differing.is_empty(),
        format!(
            "two synth+normalize+train+eval runs, {} files compared; differing: {:?}",
            cli::COMPARED.len(),
            differing
        ),
    )
}

type Criterion = (&'static str, &'static str, fn() -> Verdict);

const CRITERIA: [Criterion; 8] = [
    ("gradient", "Gradient correctness", gradient_check),
    ("pose", "Pose oracle", pose_oracle),
    ("normalization", "Normalization conditions", normalization),
    ("end-to-end", "End-to-end oracle", end_to_end),
    ("mirror-store", "Mirroring involution and store round trip", mirror_store),
    ("determinism", "CLI determinism", determinism),
    ("domain-gap", "Domain-gap direction", domain_gap),
    ("learning", "Learning ordering", learning_ordering),
];

fn main() {
    let filters: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    let mut ran = 0;
    for (key, name, run) in CRITERIA {
        if !filters.is_empty() && !filters.iter().any(|f| key.contains(f.as_str())) {
            continue;
        }
        ran += 1;
        let t = Instant::now();
        let v = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            verdict(false, format!("panicked: {msg}"))
        });
        if !v.pass {
            failed += 1;
        }
        println!(
            "{} [{key}] {name}: {} ({:.1} s)",
            if v.pass { "PASS" } else { "FAIL" },
            v.detail,
            t.elapsed().as_secs_f64()
        );
    }
    println!("acceptance: {} passed, {} failed", ran - failed, failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
