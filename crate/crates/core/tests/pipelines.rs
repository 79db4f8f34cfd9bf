use ubssd::datagen::{make_scene, SourceSpec};
use ubssd::fir::apply_fir;
use ubssd::metrics::{amari_index, GlobalMatrix};
use ubssd::pipelines::{lpa_deconvolve, stacking_depth, tcc_deconvolve, Method, RunSummary};
use ubssd::{Error, ModelDims};

#[test]
fn instantaneous_mixture_selects_zero_order() {
    let dims = ModelDims::doubled(2, 2, 0, 20_000).unwrap();
    let zero = (0..7)
        .filter(|&seed| {
            let scene = make_scene(&SourceSpec::Letters, &dims, seed).unwrap();
            let res = lpa_deconvolve(&scene.observation, &dims, seed, Some(&scene.mixing)).unwrap();
            assert!(res.amari.unwrap() < 0.05);
            res.diagnostics.ar_order == Some(0)
        })
        .count();
    assert!(zero >= 4, "Q = 0 selected in {zero}/7 seeds");
}

#[test]
fn lpa_result_is_consistent() {
    let dims = ModelDims::doubled(2, 2, 2, 20_000).unwrap();
    let scene = make_scene(&SourceSpec::Letters, &dims, 5).unwrap();
    let res = lpa_deconvolve(&scene.observation, &dims, 9, Some(&scene.mixing)).unwrap();
    let again = lpa_deconvolve(&scene.observation, &dims, 9, Some(&scene.mixing)).unwrap();
    assert_eq!(res.estimates, again.estimates);
    assert_eq!(res.amari, again.amari);

    // reported index is the metric applied to the stored global matrix
    let g = GlobalMatrix::new(res.g_matrix.clone().unwrap().into_matrix(), 2).unwrap();
    assert_eq!(res.amari.unwrap(), amari_index(&g).unwrap());
    assert!(res.amari.unwrap() < 0.03);

    // estimates are the demixer applied to the observation with the transient dropped
    let q = res.diagnostics.ar_order.unwrap();
    assert_eq!(res.demixer.taps().len(), q + 1);
    assert_eq!(res.trimmed, q.max(2));
    assert_eq!(res.estimates.dim(), 4);
    assert_eq!(res.estimates.len(), 20_000 - res.trimmed);
    let full = apply_fir(&res.demixer, &scene.observation).unwrap();
    assert_eq!(full.slice(res.trimmed, res.estimates.len()).unwrap().values(), res.estimates.values());

    // the demixed output is white
    let cov = res.estimates.covariance();
    assert!((cov - nalgebra::DMatrix::<f64>::identity(4, 4)).amax() < 0.05);

    let json = serde_json::to_string(&res.summary()).unwrap();
    let back: RunSummary = serde_json::from_str(&json).unwrap();
    assert_eq!(back, res.summary());
}

#[test]
fn tcc_bookkeeping() {
    let dims = ModelDims::doubled(2, 2, 1, 10_000).unwrap();
    let depth = stacking_depth(&dims).unwrap();
    assert_eq!(depth, 1);
    assert!(dims.dx * depth >= dims.ds() * (dims.l + depth));
    let scene = make_scene(&SourceSpec::Letters, &dims, 2).unwrap();
    let res = tcc_deconvolve(&scene.observation, &dims, 2, Some(&scene.mixing)).unwrap();
    assert_eq!(res.method, Method::Tcc);
    assert_eq!(res.demixer.taps().len(), depth);
    assert_eq!(res.diagnostics.selected_components.len(), 2);
    assert!(res.diagnostics.stacked_amari.is_some());
    let g = GlobalMatrix::new(res.g_matrix.clone().unwrap().into_matrix(), 2).unwrap();
    assert_eq!(res.amari.unwrap(), amari_index(&g).unwrap());
    assert!((0.0..=1.0).contains(&res.amari.unwrap()));
}

#[test]
fn runs_without_ground_truth() {
    let dims = ModelDims::doubled(2, 2, 1, 5_000).unwrap();
    let scene = make_scene(&SourceSpec::Letters, &dims, 1).unwrap();
    for method in [Method::Lpa, Method::Tcc] {
        let res = method.run(&scene.observation, &dims, 1, None).unwrap();
        assert!(res.amari.is_none() && res.g_matrix.is_none());
    }
}

#[test]
fn stage_failures_are_labelled() {
    let dims = ModelDims::doubled(2, 2, 1, 40).unwrap();
    let scene = make_scene(&SourceSpec::Letters, &dims, 1).unwrap();
    let big = ModelDims::doubled(2, 2, 10, 40).unwrap();
    match lpa_deconvolve(&scene.observation, &big, 1, None) {
        Err(Error::Stage { stage, .. }) => assert_eq!(stage, "ar_fit"),
        other => panic!("expected a stage error, got {other:?}"),
    }
    let wrong = ModelDims::doubled(3, 2, 1, 40).unwrap();
    assert!(matches!(lpa_deconvolve(&scene.observation, &wrong, 1, None), Err(Error::Dimension { .. })));
}
