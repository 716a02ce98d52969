//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion
//! with the measured values and exits nonzero if any criterion fails.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use greenkde::classifier::{self, ks_distance, roc_auc, Histogram, LikelihoodModel};
use greenkde::datagen::{sample_gaussian, sample_twelve_plus_flat};
use greenkde::estimator::{radial_profile, DensityModel, RadialProfile};
use greenkde::exec::Execution;
use greenkde::io;
use greenkde::kernel::{dipole_kernel, green_normalization, Displacement};
use greenkde::knn;
use greenkde::neighbors::NeighborIndex;
use greenkde::sample::{distance_sq, Dimension, SampleSet};
use greenkde::solver::{self, DipoleField, FitConfig};
use greenkde::validation::{self, GridSpec};

const GAUSS_N: usize = 2000;
const GAUSS_SEED: u64 = 42;
const GAUSS_N_LARGE_FIT: usize = 20;
const GAUSS_N_LARGE_EVAL: usize = 3;
const PROFILE_BINS: usize = 40;
const PROFILE_RMAX: f64 = 4.0;

const TRAIN_PER_CLASS: usize = 5_000;
const TEST_PER_CLASS: usize = 50_000;
const TRAIN_SEED: u64 = 42;
const TEST_SEED: u64 = 4242;
const CLF_N_LARGE: usize = 20;
const HIST_BINS: usize = 50;

fn dim(n: usize) -> Dimension {
    Dimension::new(n).unwrap()
}

fn gauss_truth(r: f64) -> f64 {
    (-r * r / 2.0).exp() / (2.0 * PI)
}

fn in_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .unwrap()
        .install(f)
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 0 {
        0.5 * (v[m - 1] + v[m])
    } else {
        v[m]
    }
}

struct GaussRun {
    model: DensityModel,
    profile: RadialProfile,
    fit_time: Duration,
    model_json: Vec<u8>,
    profile_csv: Vec<u8>,
}

fn gauss_run(threads: usize) -> GaussRun {
    in_pool(threads, || {
        let sample = sample_gaussian(dim(2), GAUSS_N, 1.0, GAUSS_SEED).unwrap();
        let cfg = FitConfig::new(GAUSS_N_LARGE_FIT, GAUSS_SEED);
        let t = Instant::now();
        let model = DensityModel::fit_with(sample, &cfg, GAUSS_N_LARGE_EVAL, Execution::Parallel).unwrap();
        let fit_time = t.elapsed();
        let profile = radial_profile(&model, &[0.0, 0.0], PROFILE_BINS, PROFILE_RMAX, Some(&gauss_truth)).unwrap();
        let mut model_json = Vec::new();
        io::write_model(&mut model_json, &model).unwrap();
        let mut profile_csv = Vec::new();
        io::write_profile(&mut profile_csv, &profile).unwrap();
        GaussRun {
            model,
            profile,
            fit_time,
            model_json,
            profile_csv,
        }
    })
}

/// Profile bins inside `[0, 2]` holding at least 30 points.
fn core_bins(p: &RadialProfile) -> Vec<usize> {
    (0..p.bins.len())
        .filter(|&b| p.bins[b].count >= 30 && p.bins[b].r_hi <= 2.0 + 1e-9)
        .collect()
}

struct ClassifierRun {
    train_time: Duration,
    score_time: Duration,
    model: LikelihoodModel,
    test: (SampleSet, SampleSet),
    train_signal: Vec<f64>,
    test_signal: Vec<f64>,
    test_background: Vec<f64>,
    csv: Vec<u8>,
}

fn classifier_run(threads: usize) -> ClassifierRun {
    in_pool(threads, || {
        let exec = Execution::Parallel;
        let (sig, bkg) = sample_twelve_plus_flat(TRAIN_PER_CLASS, TRAIN_PER_CLASS, TRAIN_SEED).unwrap();
        let test = sample_twelve_plus_flat(TEST_PER_CLASS, TEST_PER_CLASS, TEST_SEED).unwrap();
        let t = Instant::now();
        let cfg = FitConfig::new(CLF_N_LARGE, TRAIN_SEED);
        let model = classifier::train_with(sig.clone(), bkg, &cfg, CLF_N_LARGE, exec).unwrap();
        let train_time = t.elapsed();
        let t = Instant::now();
        let train_signal = model.responses(sig.coords(), exec).unwrap();
        let test_signal = model.responses(test.0.coords(), exec).unwrap();
        let test_background = model.responses(test.1.coords(), exec).unwrap();
        let score_time = t.elapsed();
        let mut csv = Vec::new();
        for r in [&train_signal, &test_signal, &test_background] {
            io::write_histogram(&mut csv, &Histogram::from_values(r, HIST_BINS).unwrap()).unwrap();
        }
        io::write_point_values(&mut csv, dim(2), test.0.coords(), "response", &test_signal).unwrap();
        io::write_point_values(&mut csv, dim(2), test.1.coords(), "response", &test_background).unwrap();
        ClassifierRun {
            train_time,
            score_time,
            model,
            test,
            train_signal,
            test_signal,
            test_background,
            csv,
        }
    })
}

type Verdict = (bool, String);

fn kernel_oracle() -> Verdict {
    let t = Instant::now();
    let mut ok = true;
    let mut parts = Vec::new();
    for n in [2, 3, 5] {
        let fd = validation::kernel_fd_check(dim(n), 100, 7).unwrap();
        let inv = validation::kernel_invariants(dim(n), 100, 7).unwrap();
        ok &= fd < 1e-5 && inv.worst() < 1e-12;
        parts.push(format!("n={n} fd={fd:.2e} invariants={:.2e}", inv.worst()));
    }
    let secs = t.elapsed().as_secs_f64();
    ok &= secs < 10.0;
    (ok, format!("{} (fd < 1e-5, invariants < 1e-12); {secs:.1}s < 10s", parts.join(", ")))
}

fn shell_null() -> Verdict {
    let t = Instant::now();
    let v2 = validation::shell_null_integral(dim(2), 1.0, 100_000, &[0.6, 0.8], 3).unwrap();
    let v3 = validation::shell_null_integral(dim(3), 1.0, 100_000, &[0.0, 0.6, 0.8], 3).unwrap();
    let secs = t.elapsed().as_secs_f64();
    (
        v2 < 1e-3 && v3 < 1e-2 && secs < 30.0,
        format!("n=2 quadrature {v2:.2e} (< 1e-3), n=3 Monte Carlo {v3:.2e} (< 1e-2); {secs:.1}s < 30s"),
    )
}

fn radial_profile_check(run: &GaussRun) -> Verdict {
    let t = Instant::now();
    let report = run.model.report();
    let mut worst: f64 = 0.0;
    let bins = core_bins(&run.profile);
    for &b in &bins {
        let bin = &run.profile.bins[b];
        let dev = (bin.mean.unwrap() - bin.truth.unwrap()).abs();
        worst = worst.max(dev / bin.spread.unwrap());
    }
    let secs = (run.fit_time + t.elapsed()).as_secs_f64();
    let ok = !bins.is_empty() && worst <= 2.0 && report.converged && report.mean_misalignment < 1e-2 && secs < 300.0;
    (
        ok,
        format!(
            "{} bins, worst |mean - truth| = {worst:.2} spread (<= 2); misalignment {:.2e} rad after {} iterations (< 1e-2); {secs:.1}s < 300s",
            bins.len(),
            report.mean_misalignment,
            report.iterations_used
        ),
    )
}

fn spread_ratio(run: &GaussRun) -> Verdict {
    let t = Instant::now();
    let model = &run.model;
    let k = knn::matched_k(model.dim(), model.n_large_eval());
    let values = knn::knn_density_batch(model.index(), model.sample().coords(), k, Execution::Parallel).unwrap();
    let kp = RadialProfile::from_values(model.sample(), &values, &[0.0, 0.0], PROFILE_BINS, PROFILE_RMAX, None).unwrap();
    let ratios: Vec<f64> = core_bins(&run.profile)
        .into_iter()
        .map(|b| run.profile.bins[b].spread.unwrap() / kp.bins[b].spread.unwrap())
        .collect();
    let m = median(ratios.clone());
    let secs = (run.fit_time + t.elapsed()).as_secs_f64();
    (
        m <= 0.7 && secs < 300.0,
        format!(
            "median Green/k-NN spread ratio {m:.3} over {} bins (<= 0.7), k = {k}; {secs:.1}s < 300s",
            ratios.len()
        ),
    )
}

fn dense_field(sample: &SampleSet, field: &DipoleField, n_discr: usize, i: usize) -> Vec<f64> {
    let n = sample.dim().get();
    let xi = sample.point(i);
    let mut d: Vec<f64> = (0..sample.len()).filter(|&j| j != i).map(|j| distance_sq(xi, sample.point(j))).collect();
    d.sort_by(f64::total_cmp);
    let cut = if n_discr == 0 { 0.0 } else { d[n_discr - 1] };
    let mut e = vec![0.0; n];
    for j in 0..sample.len() {
        let r: Vec<f64> = xi.iter().zip(sample.point(j)).map(|(a, b)| a - b).collect();
        if j == i || r.iter().map(|c| c * c).sum::<f64>() <= cut {
            continue;
        }
        let k = dipole_kernel(&Displacement::new(r).unwrap(), sample.dim()).unwrap();
        for (o, v) in e.iter_mut().zip(k.mul_vec(field.row(j))) {
            *o += v;
        }
    }
    let s = green_normalization(sample.dim()) / sample.len() as f64;
    e.iter().map(|c| c * s).collect()
}

fn solver_descent(base: &GaussRun) -> Verdict {
    let mut descents = 0;
    let mut converged = 0;
    let mut worst_norm: f64 = 0.0;
    let seeds = 20u64;
    for s in 0..seeds {
        let seed = GAUSS_SEED + s;
        let sample = sample_gaussian(dim(2), GAUSS_N, 1.0, seed).unwrap();
        let cfg = FitConfig::new(GAUSS_N_LARGE_FIT, seed);
        let (field, report) = if s == 0 {
            (base.model.field().clone(), base.model.report().clone())
        } else {
            solver::fit(&NeighborIndex::new(sample), &cfg).unwrap()
        };
        descents += usize::from(report.energy_final <= report.energy_initial);
        converged += usize::from(report.converged);
        for row in field.rows() {
            worst_norm = worst_norm.max((row.iter().map(|c| c * c).sum::<f64>().sqrt() - 1.0).abs());
        }
    }
    let mut worst_oracle: f64 = 0.0;
    for (n, len, seed) in [(2, 12, 1), (3, 10, 2), (4, 12, 3), (5, 8, 4), (2, 7, 5), (3, 12, 6)] {
        let sample = sample_gaussian(dim(n), len, 1.0, seed).unwrap();
        let field = DipoleField::init(len, dim(n), seed);
        let index = NeighborIndex::new(sample.clone());
        let radii = solver::exclusion_radii_sq(&index, 2, Execution::Parallel).unwrap();
        let fields = solver::compute_fields(&sample, &field, &radii, Execution::Parallel).unwrap();
        for i in 0..len {
            let want = dense_field(&sample, &field, 2, i);
            let scale = want.iter().fold(0.0f64, |m, c| m.max(c.abs()));
            for (g, w) in fields[i * n..(i + 1) * n].iter().zip(&want) {
                worst_oracle = worst_oracle.max((g - w).abs() / scale);
            }
        }
    }
    let ok = descents == seeds as usize && worst_norm < 1e-9 && worst_oracle < 1e-12;
    (
        ok,
        format!(
            "energy decreased in {descents}/{seeds} fits ({converged} converged); worst unit-norm error {worst_norm:.1e} (< 1e-9); small-system field error {worst_oracle:.1e} (< 1e-12)"
        ),
    )
}

fn normalization(run: &GaussRun) -> Verdict {
    let m = &run.model;
    let coarse = validation::normalization_check(m, &GridSpec::cube(dim(2), -5.0, 5.0, 101)).unwrap();
    let fine = validation::normalization_check(m, &GridSpec::cube(dim(2), -5.0, 5.0, 201)).unwrap();
    let scaled_sample = m.sample().map_points(|p| p.iter().map(|c| 2.0 * c).collect()).unwrap();
    let scaled = DensityModel::fit_with(scaled_sample, m.fit_config(), m.n_large_eval(), Execution::Parallel).unwrap();
    let wide = validation::normalization_check(&scaled, &GridSpec::cube(dim(2), -10.0, 10.0, 101)).unwrap();
    let ok = (0.85..=1.15).contains(&coarse) && (fine - coarse).abs() < 0.02 && (wide - coarse).abs() < 0.05;
    (
        ok,
        format!(
            "integral {coarse:.4} on 101x101 (in [0.85, 1.15]), {fine:.4} on 201x201 (change < 0.02), {wide:.4} for the sample scaled by 2 (change < 0.05)"
        ),
    )
}

fn argmax(h: &Histogram) -> usize {
    let c = h.counts();
    (0..c.len()).fold(0, |best, b| if c[b] > c[best] { b } else { best })
}

fn twelve_gaussians(run: &ClassifierRun) -> Verdict {
    let t = Instant::now();
    let h_train = Histogram::from_values(&run.train_signal, HIST_BINS).unwrap();
    let h_test = Histogram::from_values(&run.test_signal, HIST_BINS).unwrap();
    let h_bkg = Histogram::from_values(&run.test_background, HIST_BINS).unwrap();
    let ks = ks_distance(&h_train, &h_test).unwrap();
    let auc = roc_auc(&run.test_signal, &run.test_background).unwrap();

    let k = knn::matched_k(dim(2), CLF_N_LARGE);
    let knn_response = |pts: &SampleSet| -> Vec<f64> {
        let s = knn::knn_density_batch(run.model.signal().index(), pts.coords(), k, Execution::Parallel).unwrap();
        let b = knn::knn_density_batch(run.model.background().index(), pts.coords(), k, Execution::Parallel).unwrap();
        s.iter().zip(&b).map(|(&s, &b)| classifier::response_from_densities(s, b, run.model.epsilon())).collect()
    };
    let knn_auc = roc_auc(&knn_response(&run.test.0), &knn_response(&run.test.1)).unwrap();

    let sig_peak = argmax(&h_test);
    let bkg_peak = argmax(&h_bkg);
    let two_peaks = sig_peak >= HIST_BINS / 2 && bkg_peak < HIST_BINS / 2;
    let secs = (run.train_time + run.score_time + t.elapsed()).as_secs_f64();
    let ok = ks < 0.05 && auc >= knn_auc - 0.02 && two_peaks && secs < 1800.0;
    (
        ok,
        format!(
            "train/test signal KS {ks:.4} (< 0.05); AUC {auc:.4} vs k-NN {knn_auc:.4} (k = {k}, within 0.02); response peaks at {:.2} (signal) and {:.2} (background); {secs:.0}s < 1800s",
            h_test.edges(sig_peak).0,
            h_bkg.edges(bkg_peak).0
        ),
    )
}

fn determinism(gauss: &GaussRun, clf: &ClassifierRun) -> Verdict {
    let g4 = gauss_run(4);
    let c4 = classifier_run(4);
    let same_gauss = g4.profile_csv == gauss.profile_csv && g4.model_json == gauss.model_json;
    let same_clf = c4.csv == clf.csv;
    (
        same_gauss && same_clf,
        format!(
            "1 vs 4 threads: gaussian model and profile {} ({} bytes), classifier histograms and responses {} ({} bytes)",
            if same_gauss { "identical" } else { "differ" },
            gauss.model_json.len() + gauss.profile_csv.len(),
            if same_clf { "identical" } else { "differ" },
            clf.csv.len()
        ),
    )
}

fn main() -> ExitCode {
    let mut results: Vec<(&str, Verdict)> = Vec::new();
    let mut report = |name: &'static str, v: Verdict| {
        println!("{} {name}: {}", if v.0 { "PASS" } else { "FAIL" }, v.1);
        results.push((name, v));
    };
    report("kernel oracle", kernel_oracle());
    report("shell null integral", shell_null());
    let gauss = gauss_run(1);
    report("gaussian radial profile", radial_profile_check(&gauss));
    report("spread versus k-NN", spread_ratio(&gauss));
    report("solver descent", solver_descent(&gauss));
    report("normalization", normalization(&gauss));
    let clf = classifier_run(1);
    report("twelve-gaussian classifier", twelve_gaussians(&clf));
    report("determinism across thread counts", determinism(&gauss, &clf));
    let failed = results.iter().filter(|r| !r.1 .0).count();
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
