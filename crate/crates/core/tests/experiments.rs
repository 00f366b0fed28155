use peakload_core::evd::CanonicalParams;
use peakload_core::experiments::{
    dense_taus, export_beta_curves, gumbel_surface_records, kfold_split, log_spaced, run_cv,
};
use peakload_core::mqr::{apl, fit_mqr};
use peakload_core::{CvOptions, FitConfig, FittedModel, Formulation, Method, QuantileGrid, Thresholds};

#[test]
fn fold_means_match_pooled_metric_for_equal_folds() {
    let recs = gumbel_surface_records(200, &CanonicalParams::gumbel(0.05, 0.5, 1.0), 1).unwrap();
    let grid = QuantileGrid::default();
    let th = Thresholds::default();
    let w = [0.05, 0.4, 1.2];
    let pooled = apl(Formulation::Gumbel, &w, &recs, &grid, &th).unwrap();
    let folds = kfold_split(recs.len(), 5, 3).unwrap();
    let mean: f64 = folds
        .iter()
        .map(|f| {
            let part: Vec<_> = f.iter().map(|&i| recs[i].clone()).collect();
            apl(Formulation::Gumbel, &w, &part, &grid, &th).unwrap()
        })
        .sum::<f64>()
        / 5.0;
    assert!((mean - pooled).abs() < 1e-10 * pooled);
}

#[test]
fn two_fold_train_and_test_are_close_on_symmetric_data() {
    let recs = gumbel_surface_records(400, &CanonicalParams::gumbel(0.05, 0.5, 1.0), 2).unwrap();
    let opts = CvOptions {
        k: 2,
        lrt: false,
        ..CvOptions::default()
    };
    let report = run_cv(&recs, &[Formulation::Gumbel], &[Method::Mqr, Method::Mle], &opts).unwrap();
    assert_eq!(report.entries.len(), 2);
    for e in &report.entries {
        assert_eq!(e.folds.len(), 2);
        let rel = (e.mean_train - e.mean_test).abs() / e.mean_train.abs();
        assert!(rel < 0.2, "{:?}: {} vs {}", e.method, e.mean_train, e.mean_test);
    }
}

#[test]
fn cv_is_deterministic_and_skips_c4_under_mle() {
    let recs = gumbel_surface_records(150, &CanonicalParams::gumbel(0.05, 0.5, 1.0), 3).unwrap();
    let opts = CvOptions {
        k: 3,
        lrt: false,
        ..CvOptions::default()
    };
    let forms = [Formulation::C4, Formulation::FuzzyGumbel];
    let a = run_cv(&recs, &forms, &[Method::Mqr, Method::Mle], &opts).unwrap();
    let b = run_cv(&recs, &forms, &[Method::Mqr, Method::Mle], &opts).unwrap();
    assert_eq!(a, b);
    let pairs: Vec<_> = a.entries.iter().map(|e| (e.method, e.formulation)).collect();
    assert_eq!(
        pairs,
        [
            (Method::Mqr, Formulation::C4),
            (Method::Mqr, Formulation::FuzzyGumbel),
            (Method::Mle, Formulation::FuzzyGumbel)
        ]
    );
    let fg = &a.entries[1];
    let g = fg.folds.iter().map(|f| f.gamma.unwrap()).sum::<f64>() / 3.0;
    assert_eq!(fg.mean_gamma, Some(g));
    assert!(a.to_table().contains("f-Gumbel gamma"));
}

#[test]
fn beta_curves() {
    let recs = gumbel_surface_records(300, &CanonicalParams::gumbel(0.05, 0.5, 1.0), 4).unwrap();
    let grid = QuantileGrid::default();
    let cfg = FitConfig::default();
    let c4 = FittedModel::Mqr(fit_mqr(Formulation::C4, &recs, &grid, 0, &cfg).unwrap());
    let mut gumbel = fit_mqr(Formulation::Gumbel, &recs, &grid, 0, &cfg).unwrap();
    let taus = dense_taus(0.01, 0.99, 99).unwrap();
    let mut buf = Vec::new();
    export_beta_curves(&mut buf, &[c4], &taus, &cfg.thresholds).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let betas: Vec<f64> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert_eq!(betas.len(), 81);
    assert!(betas.windows(2).all(|b| b[0] <= b[1]));

    // f-Gumbel with gamma = 0 traces the Gumbel curve
    gumbel.train_apl = 0.0;
    let mut fg = gumbel.clone();
    fg.formulation = Formulation::FuzzyGumbel;
    fg.w.push(0.0);
    let g = FittedModel::Mqr(gumbel);
    let fg = FittedModel::Mqr(fg);
    for &t in &taus {
        assert_eq!(g.beta(t, &cfg.thresholds).unwrap(), fg.beta(t, &cfg.thresholds).unwrap());
    }
}

#[test]
fn frechet_beta_outgrows_gumbel() {
    let g = CanonicalParams::gumbel(0.0, 1.0, 0.0);
    let f = CanonicalParams::new(0.0, 1.0, 0.0, 0.4);
    let bg = peakload_core::evd::beta_tau(0.999, &g).unwrap();
    let bf = peakload_core::evd::beta_tau(0.999, &f).unwrap();
    // (-ln 0.999)^-0.4 grows like 1000^0.4 while Gumbel grows like ln 1000
    assert!(bf > 2.0 * bg, "{bf} vs {bg}");
}

#[test]
fn log_spaced_five_decades() {
    let e = log_spaced(1e2, 1e6, 5).unwrap();
    assert_eq!(e.len(), 5);
    for (i, v) in e.iter().enumerate() {
        assert!((v / 10f64.powi(i as i32 + 2) - 1.0).abs() < 1e-12);
    }
}
