//! Acceptance suite.
//!
//! One test per criterion; each prints a pass line. Criteria 1-6 and 8
//! are self-contained; criterion 7 replays the published case study and
//! runs only when the operator supplies the public dataset via
//! ILLINOIS_CSV (and optionally ILLINOIS_CONFIG).
//!
//! Run with: cargo test -p fairaudit-cli --test acceptance -- --nocapture

use std::process::Command;
use std::time::Instant;

use fairaudit_core::dataio::ModelScale;
use fairaudit_core::glm::{fit_glm, glm_naive_cov, glm_score_sandwich, GlmFamily, GlmSpec};
use fairaudit_core::power::{power_at, required_n, PilotSummary};
use fairaudit_core::regression::{
    classical_cov, fit_ols, sandwich_cov, CovKind, HcKind, ResponseVector,
};
use fairaudit_core::shift::{shift_variance_full, shift_variance_independent};
use fairaudit_core::streams::replicate_rng;
use fairaudit_core::synthlab::{
    build_poisson_population, build_population, mc_variance_oracle,
    protected_residual_covariance, OracleStatistic, PopulationSpec, PricingFunctionSpec,
};
use fairaudit_core::tost::{fit_cdp, tost_verdict, ToleranceBands, Verdict};
use fairaudit_core::AuditDataset;

const Z_ONE_SIDED_95: f64 = 1.6448536269514722;

/// The deterministic ExpLinear population (association 0.8) shared by
/// criteria 1, 2, and 4's deterministic arm.
fn scenario3_population() -> AuditDataset {
    build_population(
        &PopulationSpec::new(100_000, 8, 0.8, 11),
        &PricingFunctionSpec::exp_territorial(8),
    )
    .expect("population builds")
}

fn sorted_subsample(data: &AuditDataset, n: usize, seed: u64, rep: u64) -> AuditDataset {
    let mut rng = replicate_rng(seed, rep);
    let mut idx = rand::seq::index::sample(&mut rng, data.n_rows(), n).into_vec();
    idx.sort_unstable();
    data.subset(&idx)
}

#[test]
fn criterion_1_sandwich_validity() {
    let started = Instant::now();
    let pop = scenario3_population();

    // Generator pre-validation: Cov(A, r̂²) separated from zero.
    let (cov, se) =
        protected_residual_covariance(&pop, &["risk", "x1"], ModelScale::Level).unwrap();
    assert!(
        cov.abs() > 5.0 * se,
        "generator invalid: cov(A, r^2) = {cov} (se {se})"
    );

    let summary = mc_variance_oracle(
        &pop,
        2000,
        5000,
        99,
        &OracleStatistic::AuditBetaA {
            controls: vec!["risk".into(), "x1".into()],
            scale: ModelScale::Level,
        },
    )
    .unwrap();
    let hc3 = summary.performance(CovKind::HC3).unwrap();
    let classical = summary.performance(CovKind::Classical).unwrap();
    assert!(
        (0.935..=0.965).contains(&hc3.coverage95),
        "HC3 coverage {} outside [0.935, 0.965]",
        hc3.coverage95
    );
    assert!(
        !(0.93..=0.97).contains(&classical.coverage95),
        "classical coverage {} unexpectedly inside [0.93, 0.97]",
        classical.coverage95
    );
    // Prop-level consistency: empirical variance within 10% of the mean
    // HC3 variance estimate.
    let ratio = (summary.empirical_sd * summary.empirical_sd) / (hc3.mean_se * hc3.mean_se);
    assert!(
        (0.9..=1.1).contains(&ratio),
        "empirical/HC3 variance ratio {ratio}"
    );
    let elapsed = started.elapsed();
    assert!(
        elapsed.as_secs() <= 180,
        "runtime {}s exceeds the 3 minute budget",
        elapsed.as_secs()
    );
    println!(
        "[acceptance] criterion 1 (sandwich validity): PASS \
         (classical {:.3}, HC3 {:.3}, var ratio {:.3}, {:.0?})",
        classical.coverage95, hc3.coverage95, ratio, elapsed
    );
}

#[test]
fn criterion_2_cross_covariance_correction() {
    let pop = scenario3_population();
    let summary = mc_variance_oracle(
        &pop,
        2000,
        5000,
        123,
        &OracleStatistic::PdShift {
            proxy: "risk".into(),
            controls: vec!["x1".into()],
            scale: ModelScale::Level,
        },
    )
    .unwrap();
    let full = summary.performance(CovKind::ShiftFull).unwrap();
    let ind = summary.performance(CovKind::ShiftIndependent).unwrap();
    let full_ratio = full.mean_se / summary.empirical_sd;
    let ind_ratio = ind.mean_se / summary.empirical_sd;
    assert!(
        (0.9..=1.1).contains(&full_ratio),
        "SE_full/empirical {full_ratio}"
    );
    assert!(ind_ratio >= 2.0, "SE_ind/empirical only {ind_ratio}");
    assert!(
        (0.935..=0.965).contains(&full.coverage95),
        "shift CI coverage {}",
        full.coverage95
    );

    // Hand fixture against the direct quadratic-form oracle, written
    // with explicit matrices on an independent code path.
    let w = [0.2, 1.1, 2.3, 3.1, 4.0];
    let c = [1.0, -0.5, 0.3, 1.2, -0.8];
    let a = [0.0, 0.0, 1.0, 1.0, 1.0];
    let fv = [1.3, 2.9, 7.1, 11.0, 14.2];
    let x = fairaudit_core::DesignMatrix::from_named_columns(&[
        ("intercept", &[1.0; 5][..]),
        ("w", &w),
        ("c", &c),
    ])
    .unwrap();
    let x_ext = fairaudit_core::DesignMatrix::from_named_columns(&[
        ("intercept", &[1.0; 5][..]),
        ("w", &w),
        ("c", &c),
        ("a", &a),
    ])
    .unwrap();
    let f = ResponseVector::new(fv.to_vec()).unwrap();
    let got = shift_variance_full(&x, &x_ext, &f, 1, 1).unwrap();
    let oracle = naive::shift_variance(
        &naive::rows(&[&[1.0; 5], &w, &c]),
        &naive::rows(&[&[1.0; 5], &w, &c, &a]),
        &fv,
        1,
        1,
    );
    assert!(
        (got - oracle).abs() <= 1e-10 * oracle.abs().max(1e-30),
        "fixture: {got} vs oracle {oracle}"
    );
    println!(
        "[acceptance] criterion 2 (cross-covariance correction): PASS \
         (SE_full/emp {:.3}, SE_ind/emp {:.2}, coverage {:.3})",
        full_ratio, ind_ratio, full.coverage95
    );
}

#[test]
fn criterion_3_degenerate_exactness() {
    // Identical restricted/extended models: exact zero shift variance.
    let x = fairaudit_core::DesignMatrix::from_named_columns(&[
        ("intercept", &[1.0, 1.0, 1.0, 1.0, 1.0][..]),
        ("w", &[0.4, 1.0, 1.9, 2.7, 3.3]),
    ])
    .unwrap();
    let f = ResponseVector::new(vec![2.0, 3.1, 4.9, 6.2, 7.0]).unwrap();
    assert_eq!(shift_variance_full(&x, &x, &f, 1, 1).unwrap(), 0.0);
    assert!(shift_variance_independent(&x, &x, &f, 1, 1).unwrap() > 0.0);

    // Zero-residual fit: zero covariance for every HC kind.
    let beta0 = (1.0, 1.0);
    let exact_f: Vec<f64> = [0.4, 1.0, 1.9, 2.7, 3.3]
        .iter()
        .map(|w| beta0.0 + beta0.1 * w)
        .collect();
    let fit = fit_ols(&x, &ResponseVector::new(exact_f).unwrap()).unwrap();
    for kind in [HcKind::HC0, HcKind::HC1, HcKind::HC2, HcKind::HC3] {
        let cov = sandwich_cov(&fit, &x, kind).unwrap();
        assert!(
            cov.matrix().iter().all(|v| v.abs() < 1e-18),
            "{kind:?} not degenerate"
        );
    }
    assert!(classical_cov(&fit, &x)
        .unwrap()
        .matrix()
        .iter()
        .all(|v| v.abs() < 1e-18));

    // Gaussian-identity GLM equals OLS within 1e-10.
    let noisy = ResponseVector::new(vec![1.2, 2.4, 2.7, 4.1, 4.0]).unwrap();
    let ols = fit_ols(&x, &noisy).unwrap();
    let glm = fit_glm(&x, &noisy, &GlmSpec::new(GlmFamily::GaussianIdentity)).unwrap();
    for j in 0..2 {
        assert!((ols.beta_hat[j] - glm.beta_hat[j]).abs() < 1e-10);
    }
    println!("[acceptance] criterion 3 (degenerate exactness): PASS");
}

#[test]
fn criterion_4_glm_information_identity() {
    // Stochastic Poisson control arm: naive and sandwich agree.
    let lambda = [1.0, 1.05, 1.1, 1.15, 1.2, 1.25, 1.3, 1.35, 0.4];
    let pois = build_poisson_population(&PopulationSpec::new(50_000, 8, 0.4, 31), &lambda).unwrap();
    let sub = sorted_subsample(&pois, 5000, 77, 1);
    let x = sub.design(&["minority", "risk", "x1"], true).unwrap();
    let f = sub.response_vector(ModelScale::Level).unwrap();
    let fit = fit_glm(&x, &f, &GlmSpec::new(GlmFamily::PoissonLog)).unwrap();
    let naive = glm_naive_cov(&fit, &x).unwrap();
    let sandwich = glm_score_sandwich(&fit, &x).unwrap();
    for j in 0..x.n_cols() {
        let ratio = sandwich.matrix()[(j, j)] / naive.matrix()[(j, j)];
        assert!(
            (0.85..=1.15).contains(&ratio),
            "Poisson arm diag {j} ratio {ratio} breaks the information identity"
        );
    }

    // Deterministic nonlinear arm: they separate by more than 20%, and
    // the sandwich tracks the Monte Carlo truth.
    let pop = scenario3_population();
    let xg = pop.design(&["minority", "x1"], true).unwrap();
    let fg = pop.response_vector(ModelScale::Level).unwrap();
    let det = fit_glm(&xg, &fg, &GlmSpec::new(GlmFamily::GaussianLog)).unwrap();
    let det_naive = glm_naive_cov(&det, &xg).unwrap();
    let det_sand = glm_score_sandwich(&det, &xg).unwrap();
    let sep = det_sand.matrix()[(1, 1)] / det_naive.matrix()[(1, 1)];
    assert!(
        (sep - 1.0).abs() > 0.20,
        "deterministic arm: naive and sandwich too close (ratio {sep})"
    );

    let summary = mc_variance_oracle(
        &pop,
        2000,
        5000,
        55,
        &OracleStatistic::GlmBetaA {
            family: GlmFamily::GaussianLog,
            controls: vec!["x1".into()],
        },
    )
    .unwrap();
    let sand = summary.performance(CovKind::ScoreSandwich).unwrap();
    let ratio = sand.mean_se / summary.empirical_sd;
    assert!(
        (0.9..=1.1).contains(&ratio),
        "sandwich/empirical SD {ratio}"
    );
    println!(
        "[acceptance] criterion 4 (GLM information identity): PASS \
         (det separation {:.2}, sandwich/emp {:.3})",
        sep, ratio
    );
}

#[test]
fn criterion_5_tost_behavior() {
    let fair_pricing = PricingFunctionSpec {
        noise_sd: 0.15,
        ..PricingFunctionSpec::exp_territorial(8)
    };
    let fair = build_population(&PopulationSpec::new(100_000, 8, 0.0, 41), &fair_pricing).unwrap();
    let violating_pricing = PricingFunctionSpec {
        noise_sd: 0.15,
        protected_loading: 0.30,
        ..PricingFunctionSpec::exp_territorial(8)
    };
    let violating =
        build_population(&PopulationSpec::new(100_000, 8, 0.0, 43), &violating_pricing).unwrap();

    let verdict_rate = |pop: &AuditDataset, want: Verdict, seed: u64| -> f64 {
        let pbar = {
            let y = pop.numeric("premium").unwrap();
            y.iter().sum::<f64>() / y.len() as f64
        };
        let bands = ToleranceBands::new(0.05 * pbar, 0.80, 0.05, pbar).unwrap();
        let mut hits = 0;
        for rep in 0..500u64 {
            let sub = sorted_subsample(pop, 5000, seed, rep + 1);
            let fit = fit_cdp(&sub, None, ModelScale::Log, &["risk", "x1"]).unwrap();
            if tost_verdict(&fit, &bands).unwrap().verdict == want {
                hits += 1;
            }
        }
        hits as f64 / 500.0
    };

    let pass_rate = verdict_rate(&fair, Verdict::Pass, 61);
    assert!(pass_rate >= 0.95, "fair population pass rate {pass_rate}");
    let fail_rate = verdict_rate(&violating, Verdict::Fail, 63);
    assert!(fail_rate >= 0.95, "violating population fail rate {fail_rate}");

    // Boundary population at small n: the CI straddles the dollar
    // margin, producing the third verdict.
    let boundary_pricing = PricingFunctionSpec {
        noise_sd: 0.45,
        protected_loading: 0.05,
        ..PricingFunctionSpec::exp_territorial(8)
    };
    let boundary =
        build_population(&PopulationSpec::new(20_000, 8, 0.0, 45), &boundary_pricing).unwrap();
    let pbar = {
        let y = boundary.numeric("premium").unwrap();
        y.iter().sum::<f64>() / y.len() as f64
    };
    let bands = ToleranceBands::new(0.05 * pbar, 0.80, 0.05, pbar).unwrap();
    let sub = sorted_subsample(&boundary, 150, 67, 1);
    let fit = fit_cdp(&sub, None, ModelScale::Log, &["risk", "x1"]).unwrap();
    let verdict = tost_verdict(&fit, &bands).unwrap().verdict;
    assert_eq!(
        verdict,
        Verdict::InsufficientInformation,
        "boundary draw produced {verdict:?}"
    );
    println!(
        "[acceptance] criterion 5 (TOST behavior): PASS \
         (pass rate {:.3}, fail rate {:.3}, boundary verdict insufficient)",
        pass_rate, fail_rate
    );
}

#[test]
fn criterion_6_power_round_trip() {
    // Worked value, exactly.
    let worked = PilotSummary::new(100, 4.0, 1.0, 0.0, 0.05, 0.80).unwrap();
    assert_eq!(required_n(&worked).unwrap(), 2474);

    // Round trip on the matching generator: light-tailed linear arm with
    // a small direct loading.
    let pricing = PricingFunctionSpec {
        noise_sd: 35.0,
        protected_loading: 3.2,
        ..PricingFunctionSpec::linear_territorial(8)
    };
    let pop = build_population(
        &PopulationSpec {
            territory_skew: 0.85,
            ..PopulationSpec::new(400_000, 8, 0.8, 31)
        },
        &pricing,
    )
    .unwrap();

    let shift_stats = |data: &AuditDataset| -> (f64, f64) {
        let x = data.design(&["risk", "x1"], true).unwrap();
        let x_ext = data.design(&["risk", "x1", "minority"], true).unwrap();
        let f = data.response_vector(ModelScale::Level).unwrap();
        let fit_r = fit_ols(&x, &f).unwrap();
        let fit_e = fit_ols(&x_ext, &f).unwrap();
        let delta = fit_r.beta_hat[1] - fit_e.beta_hat[1];
        let var = shift_variance_full(&x, &x_ext, &f, 1, 1).unwrap();
        (delta, var)
    };

    let (delta_pop, _) = shift_stats(&pop);
    let pilot_n0 = 30_000usize;
    let (_, pilot_var) = shift_stats(&sorted_subsample(&pop, pilot_n0, 41, 1));
    let pilot = PilotSummary::new(
        pilot_n0 as u64,
        pilot_var,
        delta_pop,
        0.0,
        0.05,
        0.80,
    )
    .unwrap();
    let n_star = required_n(&pilot).unwrap();
    assert!(
        (800..=20_000).contains(&n_star),
        "required n {n_star} outside the calibrated window"
    );
    assert!(power_at(&pilot, n_star) >= 0.80);
    assert!(power_at(&pilot, n_star - 1) < 0.80);

    let reps = 2000u64;
    let rejections: usize = (0..reps)
        .filter(|rep| {
            let sub = sorted_subsample(&pop, n_star as usize, 43, rep + 1);
            let (delta, var) = shift_stats(&sub);
            var > 0.0 && (delta / var.sqrt()).abs() > Z_ONE_SIDED_95
        })
        .count();
    let rate = rejections as f64 / reps as f64;
    assert!(
        (0.77..=0.83).contains(&rate),
        "achieved rejection rate {rate} at n = {n_star} misses 0.80 +/- 0.03"
    );
    println!(
        "[acceptance] criterion 6 (power round trip): PASS \
         (worked n 2474, required n {n_star}, achieved {:.3})",
        rate
    );
}

#[test]
fn criterion_7_illinois_reproduction() {
    let Ok(csv_path) = std::env::var("ILLINOIS_CSV") else {
        println!(
            "[acceptance] criterion 7 (paper-table reproduction): SKIP \
             (set ILLINOIS_CSV to the public dataset to enable)"
        );
        return;
    };
    let config_path = std::env::var("ILLINOIS_CONFIG")
        .unwrap_or_else(|_| "testdata/illinois_cdp.json".to_string());
    let raw_config = std::fs::read_to_string(&config_path).expect("config readable");
    let (config, _) = fairaudit_core::lock_config(&raw_config).unwrap();
    let bytes = std::fs::read(&csv_path).expect("dataset readable");
    let data = fairaudit_core::protocol::load_dataset(&config, &bytes).unwrap();

    // Table 1 analogue.
    assert_eq!(data.n_rows(), 31_382, "row count");
    assert_eq!(data.group_labels().unwrap().len(), 34, "company count");
    let table = fairaudit_core::summarize(&data).unwrap();
    let premium = table
        .rows
        .iter()
        .find(|r| r.column == config.response_column)
        .unwrap();
    assert!((premium.mean - 370.0).abs() < 0.5);
    assert!((premium.sd - 148.0).abs() < 0.5);
    assert!((premium.max - 1345.0).abs() < 0.5);
    assert!((premium.ratio.unwrap() - 1.355).abs() < 0.005);

    // Table 2: rho for the extreme companies.
    let rho_of = |company: &str| -> f64 {
        let sub = data.filter_group(company).unwrap();
        let x = sub
            .design(
                &[
                    config.protected_column.as_str(),
                    config.control_columns[0].as_str(),
                    config.control_columns[1].as_str(),
                ],
                true,
            )
            .unwrap();
        let f = sub.response_vector(ModelScale::Log).unwrap();
        let fit = fit_ols(&x, &f).unwrap();
        fairaudit_core::se_ratio(&fit, &x, 1).unwrap()
    };
    assert!((rho_of("Economy Preferred Ins Co") - 1.775).abs() <= 0.01);
    assert!((rho_of("Trumbull Ins Co") - 0.685).abs() <= 0.01);

    // Table 5 via the CDP protocol: all 34 fail.
    let report = fairaudit_core::run_audit(&config, &data, None).unwrap();
    assert_eq!(report.summary.groups, 34);
    assert_eq!(report.summary.fail, 34, "all 34 companies fail CDP");
    let metro = report
        .groups
        .iter()
        .find(|g| g.group == "Metropolitan Prop & Cas Ins Co")
        .unwrap();
    if let fairaudit_core::GroupOutcome::Cdp { result } = &metro.outcome {
        assert!((result.dollar_gap - 158.0).abs() <= 1.0);
        assert!((result.ratio.unwrap() - 1.427).abs() <= 0.002);
    } else {
        panic!("unexpected outcome for Metropolitan");
    }

    // Table 4 via the PD protocol: 34 significant, 16 flagged.
    let mut pd_value: serde_json::Value = serde_json::from_str(&raw_config).unwrap();
    let obj = pd_value.as_object_mut().unwrap();
    obj.insert("criterion".into(), "PD".into());
    obj.insert(
        "proxy_columns".into(),
        serde_json::json!([config.control_columns[0]]),
    );
    obj.insert(
        "control_columns".into(),
        serde_json::json!([config.control_columns[1]]),
    );
    let (pd_config, _) = fairaudit_core::lock_config(&pd_value.to_string()).unwrap();
    let pd_report = fairaudit_core::run_audit(&pd_config, &data, None).unwrap();
    assert_eq!(pd_report.summary.significant, 34);
    assert_eq!(pd_report.summary.flagged, 16);
    let flagged: Vec<&str> = pd_report
        .groups
        .iter()
        .filter(|g| matches!(&g.outcome, fairaudit_core::GroupOutcome::Pd { candidates }
            if candidates.iter().any(|c| c.result.flagged)))
        .map(|g| g.group.as_str())
        .collect();
    for expected in [
        "Allstate Ind Co",
        "Country Mut Ins Co",
        "Country Pref Ins Co",
        "Economy Preferred Ins Co",
        "Farmers Automobile Ins Assoc",
        "Geico Gen Ins Co",
        "Geico Ind Co",
        "Government Employees Ins Co",
        "Metropolitan Cas Ins Co",
        "Metropolitan Prop & Cas Ins Co",
        "Owners Ins Co",
        "Safeco Ins Co Of IL",
        "Travelers Commercial Ins Co",
        "Travelers Home & Marine Ins Co",
        "United Serv Automobile Assn",
        "USAA Cas Ins Co",
    ] {
        assert!(flagged.contains(&expected), "missing flag for {expected}");
    }
    let metro_pd = pd_report
        .groups
        .iter()
        .find(|g| g.group == "Metropolitan Prop & Cas Ins Co")
        .unwrap();
    if let fairaudit_core::GroupOutcome::Pd { candidates } = &metro_pd.outcome {
        assert!((candidates[0].result.z_full - 15.73).abs() <= 0.05);
    }
    let mut ratio_sum = 0.0;
    let mut ratio_n = 0;
    for g in &pd_report.groups {
        if let fairaudit_core::GroupOutcome::Pd { candidates } = &g.outcome {
            for c in candidates {
                ratio_sum += c.result.se_full / c.result.se_independent;
                ratio_n += 1;
            }
        }
    }
    assert!((ratio_sum / ratio_n as f64 - 0.082).abs() <= 0.002);
    println!("[acceptance] criterion 7 (paper-table reproduction): PASS");
}

#[test]
fn criterion_8_cli_determinism() {
    let bin = env!("CARGO_BIN_EXE_fairaudit");
    let dir = tempfile::tempdir().unwrap();
    let manifest = std::path::Path::new(env!("CARGO_MANIFEST_DIR"));
    let config = manifest.join("testdata/cdp.json");
    let data = manifest.join("testdata/quickstart.csv");

    let run_once = |tag: &str| -> Vec<u8> {
        let out = dir.path().join(format!("report-{tag}.json"));
        let status = Command::new(bin)
            .args([
                "audit",
                "--config",
                config.to_str().unwrap(),
                "--data",
                data.to_str().unwrap(),
                "--out",
                out.to_str().unwrap(),
            ])
            .env("SOURCE_DATE_EPOCH", "1700000000")
            .output()
            .unwrap();
        assert_eq!(status.status.code(), Some(2));
        std::fs::read(out).unwrap()
    };
    let a = run_once("a");
    let b = run_once("b");
    assert_eq!(a, b, "audit reports are not byte-identical");

    let simulate_once = |tag: &str| -> Vec<u8> {
        let out = dir.path().join(format!("sim-{tag}.csv"));
        let status = Command::new(bin)
            .args([
                "simulate",
                "--out",
                out.to_str().unwrap(),
                "--seed",
                "7",
                "--n",
                "600",
                "--reps",
                "150",
            ])
            .output()
            .unwrap();
        assert_eq!(status.status.code(), Some(0));
        std::fs::read(out).unwrap()
    };
    let sa = simulate_once("a");
    let sb = simulate_once("b");
    assert_eq!(sa, sb, "simulate outputs are not byte-identical");
    println!("[acceptance] criterion 8 (determinism): PASS");
}

/// Independent naive linear algebra used by the criterion-2 fixture: a
/// Gauss-Jordan inverse, explicit weight vectors, and the three diagonal
/// quadratic forms evaluated with literal loops.
#[allow(clippy::needless_range_loop)]
mod naive {
    pub fn rows(cols: &[&[f64]]) -> Vec<Vec<f64>> {
        let n = cols[0].len();
        (0..n).map(|i| cols.iter().map(|c| c[i]).collect()).collect()
    }

    fn invert(a: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let n = a.len();
        let mut m: Vec<Vec<f64>> = a
            .iter()
            .enumerate()
            .map(|(i, row)| {
                let mut r = row.clone();
                r.extend((0..n).map(|j| if i == j { 1.0 } else { 0.0 }));
                r
            })
            .collect();
        for col in 0..n {
            let pivot = (col..n)
                .max_by(|x, y| m[*x][col].abs().partial_cmp(&m[*y][col].abs()).unwrap())
                .unwrap();
            m.swap(col, pivot);
            let d = m[col][col];
            for v in m[col].iter_mut() {
                *v /= d;
            }
            for row in 0..n {
                if row != col {
                    let f = m[row][col];
                    for k in 0..2 * n {
                        let sub = f * m[col][k];
                        m[row][k] -= sub;
                    }
                }
            }
        }
        m.into_iter().map(|r| r[n..].to_vec()).collect()
    }

    fn xtx(x: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let p = x[0].len();
        let mut out = vec![vec![0.0; p]; p];
        for row in x {
            for i in 0..p {
                for j in 0..p {
                    out[i][j] += row[i] * row[j];
                }
            }
        }
        out
    }

    fn weights(x: &[Vec<f64>], j: usize) -> Vec<f64> {
        let inv = invert(&xtx(x));
        x.iter()
            .map(|row| row.iter().zip(&inv[j]).map(|(v, w)| v * w).sum())
            .collect()
    }

    fn residuals(x: &[Vec<f64>], f: &[f64]) -> Vec<f64> {
        let inv = invert(&xtx(x));
        let p = x[0].len();
        let mut xtf = vec![0.0; p];
        for (row, y) in x.iter().zip(f) {
            for j in 0..p {
                xtf[j] += row[j] * y;
            }
        }
        let beta: Vec<f64> = (0..p)
            .map(|i| (0..p).map(|j| inv[i][j] * xtf[j]).sum())
            .collect();
        x.iter()
            .zip(f)
            .map(|(row, y)| y - row.iter().zip(&beta).map(|(v, b)| v * b).sum::<f64>())
            .collect()
    }

    pub fn shift_variance(
        x: &[Vec<f64>],
        x_ext: &[Vec<f64>],
        f: &[f64],
        j: usize,
        k: usize,
    ) -> f64 {
        let a = weights(x, j);
        let ae = weights(x_ext, k);
        let r = residuals(x, f);
        let re = residuals(x_ext, f);
        let n = f.len();
        let (mut t1, mut t2, mut cx) = (0.0, 0.0, 0.0);
        for i in 0..n {
            t1 += a[i] * r[i] * r[i] * a[i];
            t2 += ae[i] * re[i] * re[i] * ae[i];
            cx += a[i] * r[i] * re[i] * ae[i];
        }
        t1 + t2 - 2.0 * cx
    }
}
