//! Acceptance report: one PASS/FAIL line per criterion. A FAIL line is a
//! measured outcome, not a test failure; only hard errors abort the run.

// Writing to the stderr handle directly keeps the report out of the capture.
#![allow(clippy::explicit_write)]

use std::io::Write;
use std::time::Instant;

use corrsec::an_optimizer::{optimize_an, oracle_an, random_instance, AnOptions};
use corrsec::beamformer::BernsteinData;
use corrsec::channel_model::{shifted_stats, standard_cn, wiretap_stats, WiretapSampler};
use corrsec::distributions::{signal_leakage_params, DeltaEModel};
use corrsec::experiment::{run_sweep, Axis, Scheme, SweepResult, SweepSpec, SystemParams};
use corrsec::linalg::{CMatrix, CVector, C64};
use corrsec::montecarlo::{
    bernstein_exceedance, empirical_outage, rate_at_outage, validate_channel_model, LeakageMode,
    McConfig, TABLE_I,
};
use corrsec::power_alloc::{
    allocate_grid, allocate_window, prepare_design, run_design, DesignOptions, TransmitDesign,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Bypasses the test harness capture so the report lands in the log.
fn report(id: u8, pass: bool, detail: String) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    let mut err = std::io::stderr();
    writeln!(err, "criterion {id} {verdict}: {detail}").unwrap();
}

fn note(text: String) {
    writeln!(std::io::stderr(), "    {text}").unwrap();
}

fn env_usize(key: &str, default: usize) -> usize {
    std::env::var(key)
        .ok()
        .and_then(|v| v.parse().ok())
        .unwrap_or(default)
}

fn row1() -> SystemParams {
    SystemParams::default()
}

fn channel_validation() {
    let mut worst: f64 = 0.0;
    let mut slowest: f64 = 0.0;
    for case in TABLE_I {
        let t = Instant::now();
        let v = validate_channel_model(case.id, &McConfig::new(1_000_000, 100 + case.id as u64))
            .unwrap();
        let secs = t.elapsed().as_secs_f64();
        note(format!("case {}: KS {:.5} in {:.1} s", case.id, v.ks, secs));
        worst = worst.max(v.ks);
        slowest = slowest.max(secs);
    }
    report(
        1,
        worst < 0.01 && slowest < 30.0,
        format!("max KS {worst:.5} (< 0.01), slowest case {slowest:.1} s (< 30 s), 10^6 samples per case"),
    );
}

fn an_optimizer_vs_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (mut worst_rel, mut worst_h, mut worst_norm) = (0.0f64, 0.0f64, 0.0f64);
    for k in 0..100 {
        let ch = random_instance(2 + k % 7, 0.9, &mut rng).unwrap();
        let sol = optimize_an(&ch, &AnOptions::default()).unwrap();
        let oracle = oracle_an(&ch).unwrap();
        let rel = (sol.objective - oracle.objective).abs()
            / oracle.objective.abs().max(f64::MIN_POSITIVE);
        worst_rel = worst_rel.max(rel);
        worst_h = worst_h.max(ch.h().dotc(&sol.a).norm() / ch.h().norm());
        worst_norm = worst_norm.max((sol.a.norm_squared() - 1.0).abs());
    }
    report(
        2,
        worst_rel <= 1e-6 && worst_h < 1e-6 && worst_norm < 1e-4,
        format!(
            "100 instances: max relative gap {worst_rel:.2e} (<= 1e-6), max |h^H a|/|h| {worst_h:.2e} (< 1e-6), max ||a||^2-1| {worst_norm:.2e} (< 1e-4)"
        ),
    );
}

fn random_hermitian(n: usize, rng: &mut ChaCha8Rng) -> CMatrix {
    let m = CMatrix::from_fn(n, n, |_, _| standard_cn(rng));
    (&m + m.adjoint()).scale(0.5)
}

fn bernstein_tail() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut violations = 0;
    let mut worst_margin = f64::NEG_INFINITY;
    let mut checks = 0;
    for pair in 0..50 {
        let n = 2 + pair % 7;
        let lambda = random_hermitian(n, &mut rng);
        let scale = rng.random_range(0.1..2.0);
        let x = CVector::from_fn(n, |_, _| standard_cn(&mut rng) * scale);
        for eps in [0.15f64, 0.05] {
            let sigma = (1.0 / eps).ln();
            let d = BernsteinData {
                a_mat: CMatrix::zeros(n, n),
                lambda: lambda.clone(),
                x: x.clone(),
                sigma,
                omega: 0.0,
                budget: 0.0,
            };
            let (p, se) = bernstein_exceedance(&d, 1_000_000, 1000 + checks).unwrap();
            let bound = (-sigma).exp() + 3.0 * se;
            worst_margin = worst_margin.max(p - bound);
            if p > bound {
                violations += 1;
            }
            checks += 1;
        }
    }
    report(
        3,
        violations == 0,
        format!("{checks} (Lambda, x, sigma) cases at 10^6 draws: {violations} exceed e^-sigma + 3 s.e.; largest excess {worst_margin:.2e}"),
    );
}

/// Designs at the default sweep parameters, reused by criteria 4 and 7.
fn row1_designs(count: usize) -> Vec<(corrsec::channel_model::ChannelRealization, TransmitDesign)> {
    let params = row1();
    let opts = DesignOptions::default();
    (0..count as u64)
        .map(|seed| {
            let ch = params.instance(5000 + seed).unwrap();
            let out = run_design(&ch, params.power_watts(), params.epsilon, &opts).unwrap();
            (ch, out.design)
        })
        .collect()
}

fn conservativeness(designs: &[(corrsec::channel_model::ChannelRealization, TransmitDesign)]) {
    let eps = row1().epsilon;
    let (mut violations, mut diag_violations) = (0, 0);
    let mut worst = f64::NEG_INFINITY;
    let mut gap_sum = 0.0;
    for (k, (ch, d)) in designs.iter().enumerate() {
        let seed = 7000 + k as u64;
        let mc = empirical_outage(d, ch, d.rs, &McConfig::new(100_000, seed)).unwrap();
        worst = worst.max(mc.outage - eps);
        gap_sum += mc.leakage_gap;
        if mc.outage > eps + 3.0 * mc.outage_se {
            violations += 1;
        }
        let cfg = McConfig {
            samples: 100_000,
            seed,
            leakage: LeakageMode::Diagonal,
        };
        let diag = empirical_outage(d, ch, d.rs, &cfg).unwrap();
        if diag.outage > eps + 3.0 * diag.outage_se {
            diag_violations += 1;
        }
    }
    note(format!(
        "with the per-antenna AN leakage surrogate in place of |g^H a|^2: {diag_violations}/{} exceed eps + 3 s.e.",
        designs.len()
    ));
    report(
        4,
        violations == 0,
        format!(
            "{} designs, 10^5 exact draws each: {violations} exceed eps + 3 s.e.; max outage - eps {worst:+.4}; mean leakage gap (exact - diagonal) {:.4}",
            designs.len(),
            gap_sum / designs.len() as f64
        ),
    );
}

fn local_vs_brute_force() {
    let params = row1();
    let p = params.power_watts();
    let opts = DesignOptions::default();
    let (mut close, mut t_window, mut t_grid) = (0, 0.0, 0.0);
    let n = 100;
    for seed in 0..n {
        let ch = params.instance(9000 + seed).unwrap();
        let prep = prepare_design(&ch, p, params.epsilon, &opts).unwrap();
        let t = Instant::now();
        let window = allocate_window(prep.clone(), &ch, p, params.epsilon, &opts).unwrap();
        t_window += t.elapsed().as_secs_f64();
        let t = Instant::now();
        let grid = allocate_grid(prep, &ch, p, params.epsilon, 100, &opts).unwrap();
        t_grid += t.elapsed().as_secs_f64();
        if window.design.rs >= grid.design.rs * 0.98 - 1e-12 {
            close += 1;
        }
    }
    let ratio = t_window / t_grid;
    report(
        5,
        close * 100 >= 95 * n && ratio <= 0.5,
        format!(
            "window within 2% of 100-point grid on {close}/{n} instances (>= 95%); split-search time ratio {ratio:.3} (<= 0.5; shared AN and beamformer stage excluded)"
        ),
    );
}

fn strictly_monotone(v: &[f64], increasing: bool) -> bool {
    v.windows(2)
        .all(|w| if increasing { w[1] > w[0] } else { w[1] < w[0] })
}

fn fmt_series(v: &[f64]) -> String {
    v.iter()
        .map(|x| format!("{x:.3}"))
        .collect::<Vec<_>>()
        .join(" ")
}

fn trends(reps: usize) -> SweepResult {
    let mut pass = true;
    let mut details = Vec::new();
    let mut power = None;
    let t = Instant::now();
    for (axis, increasing) in [
        (Axis::Rho, false),
        (Axis::Power, true),
        (Axis::Epsilon, true),
        (Axis::Antennas, true),
    ] {
        let mut spec = SweepSpec::new(axis, row1());
        spec.schemes = vec![Scheme::Proposed, Scheme::Traditional];
        spec.replications = reps;
        spec.seed = 11;
        let started = Instant::now();
        let res = run_sweep(&spec).unwrap();
        let prop = res.means(Scheme::Proposed);
        let trad = res.means(Scheme::Traditional);
        let trend_ok = strictly_monotone(&prop, increasing);
        let dominates = prop.iter().zip(&trad).all(|(p, t)| p >= t);
        note(format!(
            "{} sweep ({:.0} s): proposed [{}] traditional [{}]",
            axis.name(),
            started.elapsed().as_secs_f64(),
            fmt_series(&prop),
            fmt_series(&trad)
        ));
        let mut ok = trend_ok && dominates;
        if axis == Axis::Rho {
            let gains: Vec<f64> = prop.iter().zip(&trad).map(|(p, t)| (p - t) / t).collect();
            let widening = strictly_monotone(&gains, true);
            note(format!(
                "rho sweep relative gain of proposed over traditional [{}]",
                fmt_series(&gains)
            ));
            ok &= widening;
            details.push(format!(
                "rho: trend {trend_ok}, dominance {dominates}, widening gain {widening}"
            ));
        } else {
            details.push(format!(
                "{}: trend {trend_ok}, dominance {dominates}",
                axis.name()
            ));
        }
        pass &= ok;
        if axis == Axis::Power {
            power = Some(res);
        }
    }
    report(
        6,
        pass,
        format!(
            "{reps} replications per point (200 in the full run; set CORRSEC_TREND_REPS), {:.0} s total; {}",
            t.elapsed().as_secs_f64(),
            details.join("; ")
        ),
    );
    power.unwrap()
}

/// Eve's SNR under the diagonal leakage surrogate; with `independent` the
/// leakage uses a second wiretap draw, matching the analytic model's
/// independence of signal and AN leakage.
fn delta_e_samples(
    ch: &corrsec::channel_model::ChannelRealization,
    d: &TransmitDesign,
    n: usize,
    seed: u64,
    independent: bool,
) -> Vec<f64> {
    let h = ch.h();
    let shift: Vec<C64> = wiretap_stats(ch)
        .mean
        .iter()
        .zip(shifted_stats(ch).mean.iter())
        .map(|(f, s)| f - s)
        .collect();
    let weights = d.an.diagonal_weights(h);
    let sampler = WiretapSampler::new(ch);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut g = CVector::zeros(ch.ns());
    let mut g_an = CVector::zeros(ch.ns());
    let mut out: Vec<f64> = (0..n)
        .map(|_| {
            sampler.sample_into(g.as_mut_slice(), &mut rng);
            if independent {
                sampler.sample_into(g_an.as_mut_slice(), &mut rng);
            } else {
                g_an.copy_from(&g);
            }
            let leak: f64 = g_an
                .iter()
                .zip(&shift)
                .zip(&weights)
                .map(|((gi, si), wi)| wi * (gi - si).norm_sqr())
                .sum();
            d.delta_e(&g, leak)
        })
        .collect();
    out.sort_by(f64::total_cmp);
    out
}

fn distribution_machinery(
    designs: &[(corrsec::channel_model::ChannelRealization, TransmitDesign)],
) {
    // analytic CDF against the empirical one at 400 sample quantiles
    let sup_at = |model: &DeltaEModel, d: &TransmitDesign, samples: &[f64]| -> f64 {
        let n = samples.len();
        (1..400).fold(0.0f64, |acc, j| {
            let i = j * n / 400;
            let f = model.cdf(samples[i], d.phi, d.p).unwrap();
            acc.max((f - i as f64 / n as f64).abs())
                .max((f - (i + 1) as f64 / n as f64).abs())
        })
    };
    let (mut sup, mut sup_independent) = (0.0f64, 0.0f64);
    for (k, (ch, d)) in designs.iter().take(3).enumerate() {
        let xi = d.an.xi_distribution(ch).unwrap();
        let model = DeltaEModel::new(signal_leakage_params(&d.w, ch).unwrap(), &xi).unwrap();
        let shared = sup_at(
            &model,
            d,
            &delta_e_samples(ch, d, 1_000_000, 8000 + k as u64, false),
        );
        let split = sup_at(
            &model,
            d,
            &delta_e_samples(ch, d, 1_000_000, 8100 + k as u64, true),
        );
        note(format!(
            "delta_e CDF instance {k} (phi {:.2}): sup distance {shared:.4}; {split:.4} when the AN leakage uses an independent draw",
            d.phi
        ));
        sup = sup.max(shared);
        sup_independent = sup_independent.max(split);
    }
    let mut worst_rate: f64 = 0.0;
    let matched = designs.len().min(20);
    for (k, (ch, d)) in designs.iter().take(matched).enumerate() {
        let cfg = McConfig {
            samples: 100_000,
            seed: 8500 + k as u64,
            leakage: LeakageMode::Diagonal,
        };
        let mc_rate = rate_at_outage(d, ch, row1().epsilon, &cfg).unwrap();
        worst_rate = worst_rate.max((mc_rate - d.rs).abs());
    }
    report(
        7,
        sup < 0.01 && worst_rate <= 0.05,
        format!(
            "delta_e CDF sup distance {sup:.4} (< 0.01, 10^6 diagonal-mode draws; {sup_independent:.4} with independent leakage draws); max |analytic - MC quantile| rate {worst_rate:.4} bits on {matched} instances (<= 0.05)"
        ),
    );
}

fn diminishing_returns(power: &SweepResult) {
    let get = |v: f64, s: Scheme| power.row(v, s).unwrap().rs_mean;
    let ratio = get(15.0, Scheme::Proposed) / get(12.0, Scheme::Proposed);
    let trad = get(15.0, Scheme::Traditional) / get(12.0, Scheme::Traditional);
    report(
        8,
        ratio < 1.5,
        format!("Rs(15 dBW)/Rs(12 dBW) = {ratio:.3} for the proposed scheme (< 1.5); traditional {trad:.3}"),
    );
}

#[test]
fn acceptance_report() {
    let reps = env_usize("CORRSEC_TREND_REPS", 20);
    channel_validation();
    an_optimizer_vs_oracle();
    bernstein_tail();
    let designs = row1_designs(50);
    conservativeness(&designs);
    local_vs_brute_force();
    let power = trends(reps);
    distribution_machinery(&designs);
    diminishing_returns(&power);
}
