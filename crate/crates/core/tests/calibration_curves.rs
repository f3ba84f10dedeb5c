use robust_term::calibration::{calibrate, initial_curve_roundtrip, ForwardCurve};
use robust_term::error::{CurveError, Error};
use robust_term::shortrate::short_rate_shifted;
use robust_term::TimeGrid;

fn humped() -> ForwardCurve {
    ForwardCurve::new(vec![(0.0, 0.015), (1.0, 0.025), (2.0, 0.035), (5.0, 0.03), (10.0, 0.028)]).unwrap()
}

#[test]
fn csv_and_json_give_the_same_curve() {
    let csv = ForwardCurve::from_csv_str("T,f\n0,0.01\n10,0.03\n").unwrap();
    let json = ForwardCurve::from_json_str(r#"{"knots": [[0, 0.01], [10, 0.03]]}"#).unwrap();
    assert_eq!(csv, json);
    assert!((csv.slope(3.0).unwrap() - 0.002).abs() < 1e-15);
}

#[test]
fn malformed_curves_have_distinct_diagnostics() {
    let dup = ForwardCurve::from_csv_str("T,f\n0,0.01\n5,0.02\n5,0.03\n").unwrap_err();
    assert!(matches!(dup, Error::Curve(CurveError::DuplicateMaturity { index: 2, .. })));
    let dec = ForwardCurve::new(vec![(0.0, 0.01), (5.0, 0.02), (4.0, 0.02)]).unwrap_err();
    assert!(matches!(dec, CurveError::DecreasingMaturity { index: 2, .. }));
    let zero = ForwardCurve::new(vec![(1.0, 0.01), (5.0, 0.02)]).unwrap_err();
    assert!(matches!(zero, CurveError::MissingZeroKnot(_)));
    let nan = ForwardCurve::new(vec![(0.0, f64::NAN), (5.0, 0.02)]).unwrap_err();
    assert!(matches!(nan, CurveError::NonFinite(0)));
    let header = ForwardCurve::from_csv_str("maturity,fwd\n0,0.01\n1,0.01\n").unwrap_err();
    assert!(matches!(header, Error::Curve(CurveError::BadHeader(_))));
}

#[test]
fn flat_curve_prices_exactly() {
    let m = calibrate(&ForwardCurve::new(vec![(0.0, 0.02), (10.0, 0.02)]).unwrap(), 1.0).unwrap();
    assert!((m.price(0.0, 1.0, m.r0, 0.0).unwrap().price - (-0.02f64).exp()).abs() <= 1e-12);
    let zero = calibrate(&ForwardCurve::new(vec![(0.0, 0.0), (10.0, 0.0)]).unwrap(), 1.0).unwrap();
    let rt = initial_curve_roundtrip(&zero, &[0.0, 1.0, 5.0, 10.0]).unwrap();
    assert!(rt.rows.iter().all(|r| r.p_model == 1.0));
}

#[test]
fn humped_curve_forwards_are_reproduced() {
    let m = calibrate(&humped(), 0.7).unwrap();
    let maturities: Vec<f64> = (1..100).map(|i| i as f64 * 0.1 + 0.05).collect();
    let rt = initial_curve_roundtrip(&m, &maturities).unwrap();
    assert!(rt.max_abs_error <= 1e-10);
    assert!(rt.max_forward_error <= 1e-6, "{}", rt.max_forward_error);
}

#[test]
fn noiseless_fitted_short_rate_follows_the_forward_curve() {
    // With mu = alpha f + f' and r0 = f(0), the deterministic rate is f(t).
    let m = calibrate(&humped(), 1.3).unwrap();
    let grid = TimeGrid::new(10.0, 640).unwrap();
    let zeros = vec![0.0; 641];
    let r = short_rate_shifted(&zeros, &zeros, &grid, &m.rate_params());
    for k in (0..=640).step_by(16) {
        let f = humped().eval(grid.time(k)).unwrap();
        assert!((r[k] - f).abs() < 1e-10, "t = {}: {} vs {f}", grid.time(k), r[k]);
    }
}

#[test]
fn degenerate_band_fitted_price_is_classical_fitted_hull_white() {
    // With the continuous-time lambda of a constant sigma the two prices
    // coincide for any short rate.
    let (alpha, sigma) = (0.9, 0.012);
    let m = calibrate(&humped(), alpha).unwrap();
    for (t, maturity, r) in [(0.5, 1.0, 0.01), (1.0, 7.5, 0.04), (3.0, 3.5, -0.01), (2.0, 10.0, 0.025)] {
        let lambda = sigma * sigma * (1.0 - (-2.0 * alpha * t).exp()) / (2.0 * alpha);
        let robust = m.price(t, maturity, r, lambda).unwrap().price;
        let classical = m.price_classical_fitted(sigma, t, maturity, r).unwrap().price;
        assert!((robust - classical).abs() <= 1e-12, "{robust} vs {classical}");
    }
}

#[test]
fn beyond_last_knot_is_rejected() {
    let m = calibrate(&humped(), 1.0).unwrap();
    assert!(m.mu_at(10.5).is_err());
    assert!(m.a_fitted(0.0, 11.0).is_err());
}
