//! Fitting the mean-reversion level to an observed initial forward curve.
//!
//! With `mu(t) = alpha f*(0,t) + d/dt f*(0,t)` the robust model reproduces
//! the observed discount curve at time zero. The curve is piecewise linear
//! between knots, so every integral of `f*` is exact.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::bonds::{b_tau, robust_price_from_parts, BondQuote};
use crate::error::{CurveError, Error, Result};
use crate::io::fmt_f64;
use crate::shortrate::{MeanLevel, PiecewiseLinear, RateParams};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ForwardCurve {
    knots: Vec<(f64, f64)>,
}

#[derive(Deserialize)]
struct CurveDoc {
    knots: Vec<(f64, f64)>,
}

impl ForwardCurve {
    pub fn new(knots: Vec<(f64, f64)>) -> std::result::Result<Self, CurveError> {
        if knots.len() < 2 {
            return Err(CurveError::TooFewKnots(knots.len()));
        }
        if let Some(i) = knots.iter().position(|(t, f)| !(t.is_finite() && f.is_finite())) {
            return Err(CurveError::NonFinite(i));
        }
        if knots[0].0 != 0.0 {
            return Err(CurveError::MissingZeroKnot(knots[0].0));
        }
        for i in 1..knots.len() {
            let (prev, cur) = (knots[i - 1].0, knots[i].0);
            if cur == prev {
                return Err(CurveError::DuplicateMaturity { index: i, maturity: cur });
            }
            if cur < prev {
                return Err(CurveError::DecreasingMaturity {
                    index: i,
                    maturity: cur,
                    previous: prev,
                });
            }
        }
        Ok(Self { knots })
    }

    /// CSV with header `T,f`.
    pub fn from_csv_str(s: &str) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(s.as_bytes());
        let header: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
        if header != ["T", "f"] {
            return Err(CurveError::BadHeader(header.join(",")).into());
        }
        let mut knots = Vec::new();
        for (row, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| CurveError::Malformed {
                row: row + 1,
                reason: e.to_string(),
            })?;
            let num = |i: usize| -> std::result::Result<f64, CurveError> {
                rec.get(i)
                    .ok_or_else(|| CurveError::Malformed {
                        row: row + 1,
                        reason: "missing field".into(),
                    })?
                    .parse::<f64>()
                    .map_err(|e| CurveError::Malformed {
                        row: row + 1,
                        reason: e.to_string(),
                    })
            };
            knots.push((num(0)?, num(1)?));
        }
        Ok(Self::new(knots)?)
    }

    /// JSON `{"knots": [[T, f], ...]}`.
    pub fn from_json_str(s: &str) -> Result<Self> {
        let doc: CurveDoc = serde_json::from_str(s)?;
        Ok(Self::new(doc.knots)?)
    }

    /// Reads a curve file; JSON when the content starts with `{`, else CSV.
    pub fn from_path(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path)?;
        if s.trim_start().starts_with('{') {
            Self::from_json_str(&s)
        } else {
            Self::from_csv_str(&s)
        }
    }

    pub fn knots(&self) -> &[(f64, f64)] {
        &self.knots
    }

    pub fn last_maturity(&self) -> f64 {
        self.knots[self.knots.len() - 1].0
    }

    fn check_range(&self, t: f64) -> Result<()> {
        if !(t >= 0.0 && t <= self.last_maturity()) {
            return Err(Error::OutOfRange {
                t,
                last: self.last_maturity(),
            });
        }
        Ok(())
    }

    /// Segment containing `t`, right-continuous; the last knot belongs to
    /// the last segment.
    fn segment(&self, t: f64) -> usize {
        let i = self.knots.partition_point(|k| k.0 <= t).saturating_sub(1);
        i.min(self.knots.len() - 2)
    }

    fn slope_of(&self, i: usize) -> f64 {
        let (t0, f0) = self.knots[i];
        let (t1, f1) = self.knots[i + 1];
        (f1 - f0) / (t1 - t0)
    }

    fn eval_unchecked(&self, t: f64) -> f64 {
        let i = self.segment(t);
        self.knots[i].1 + self.slope_of(i) * (t - self.knots[i].0)
    }

    pub fn eval(&self, t: f64) -> Result<f64> {
        self.check_range(t)?;
        Ok(self.eval_unchecked(t))
    }

    /// Right derivative (left derivative at the last knot).
    pub fn slope(&self, t: f64) -> Result<f64> {
        self.check_range(t)?;
        Ok(self.slope_of(self.segment(t)))
    }

    /// `int_a^b f*(0,s) ds`, exact.
    pub fn integral(&self, a: f64, b: f64) -> Result<f64> {
        self.check_range(a)?;
        self.check_range(b)?;
        if b < a {
            return Err(Error::TimeOrder { t: a, maturity: b });
        }
        let mut edges = vec![a];
        edges.extend(self.knots.iter().map(|k| k.0).filter(|&x| x > a && x < b));
        edges.push(b);
        Ok(edges
            .windows(2)
            .map(|w| 0.5 * (w[1] - w[0]) * (self.eval_unchecked(w[0]) + self.eval_unchecked(w[1])))
            .sum())
    }

    /// `exp(-int_0^T f*(0,s) ds)`.
    pub fn discount(&self, maturity: f64) -> Result<f64> {
        Ok((-self.integral(0.0, maturity)?).exp())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CalibratedModel {
    pub alpha: f64,
    pub curve: ForwardCurve,
    pub mu: PiecewiseLinear,
    pub r0: f64,
}

pub fn calibrate(curve: &ForwardCurve, alpha: f64) -> Result<CalibratedModel> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidParameter(format!("alpha must be > 0, got {alpha}")));
    }
    let pieces = (0..curve.knots.len() - 1)
        .map(|i| {
            let (t, f) = curve.knots[i];
            let s = curve.slope_of(i);
            (t, alpha * f + s, alpha * s)
        })
        .collect();
    Ok(CalibratedModel {
        alpha,
        curve: curve.clone(),
        mu: PiecewiseLinear::new(pieces)?,
        r0: curve.knots[0].1,
    })
}

impl CalibratedModel {
    pub fn mu_at(&self, t: f64) -> Result<f64> {
        self.curve.check_range(t)?;
        Ok(self.mu.eval(t))
    }

    pub fn rate_params(&self) -> RateParams {
        RateParams {
            r0: self.r0,
            alpha: self.alpha,
            mu: MeanLevel::Piecewise(self.mu.clone()),
        }
    }

    /// `A(t,T) = -int_t^T f*(0,s) ds + f*(0,t) B(t,T)`.
    pub fn a_fitted(&self, t: f64, maturity: f64) -> Result<f64> {
        let integral = self.curve.integral(t, maturity)?;
        let f_t = self.curve.eval(t)?;
        Ok(-integral + f_t * b_tau(self.alpha, maturity - t))
    }

    pub fn price(&self, t: f64, maturity: f64, r_t: f64, lambda_t: f64) -> Result<BondQuote> {
        if !(lambda_t >= 0.0) {
            return Err(Error::NegativeLambda(lambda_t));
        }
        let a = self.a_fitted(t, maturity)?;
        Ok(BondQuote {
            t,
            maturity,
            price: robust_price_from_parts(a, b_tau(self.alpha, maturity - t), r_t, lambda_t),
        })
    }

    /// Classical fitted Hull-White price with constant volatility `sigma`:
    /// `P*(0,T)/P*(0,t) exp(B f*(0,t) - sigma^2 (1 - e^{-2 alpha t}) B^2 / (4 alpha) - B r_t)`.
    pub fn price_classical_fitted(&self, sigma: f64, t: f64, maturity: f64, r_t: f64) -> Result<BondQuote> {
        if t > maturity {
            return Err(Error::TimeOrder { t, maturity });
        }
        let b = b_tau(self.alpha, maturity - t);
        let ratio = self.curve.discount(maturity)? / self.curve.discount(t)?;
        let var = sigma * sigma * -(-2.0 * self.alpha * t).exp_m1() / (4.0 * self.alpha);
        Ok(BondQuote {
            t,
            maturity,
            price: ratio * (b * self.curve.eval(t)? - var * b * b - b * r_t).exp(),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RoundtripRow {
    pub maturity: f64,
    pub p_model: f64,
    pub p_curve: f64,
    pub abs_error: f64,
    pub forward_model: f64,
    pub forward_curve: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RoundtripReport {
    pub rows: Vec<RoundtripRow>,
    pub max_abs_error: f64,
    pub max_forward_error: f64,
}

impl RoundtripReport {
    /// `T,P_model,P_curve,abs_error`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "T,P_model,P_curve,abs_error")?;
        for r in &self.rows {
            writeln!(
                w,
                "{},{},{},{}",
                fmt_f64(r.maturity),
                fmt_f64(r.p_model),
                fmt_f64(r.p_curve),
                fmt_f64(r.abs_error)
            )?;
        }
        Ok(())
    }
}

/// Compares model prices `P(0,T)` (with `lambda_0 = 0`) against the curve's
/// discount factors, and the model's finite-difference forward against `f*`.
pub fn initial_curve_roundtrip(model: &CalibratedModel, maturities: &[f64]) -> Result<RoundtripReport> {
    let last = model.curve.last_maturity();
    let log_p = |m: f64| -> Result<f64> { Ok(model.price(0.0, m, model.r0, 0.0)?.price.ln()) };
    let mut rows = Vec::with_capacity(maturities.len());
    for &m in maturities {
        let p_model = model.price(0.0, m, model.r0, 0.0)?.price;
        let p_curve = model.curve.discount(m)?;
        let h = 1e-5 * last;
        let (lo, hi) = ((m - h).max(0.0), (m + h).min(last));
        let forward_model = -(log_p(hi)? - log_p(lo)?) / (hi - lo);
        rows.push(RoundtripRow {
            maturity: m,
            p_model,
            p_curve,
            abs_error: (p_model - p_curve).abs(),
            forward_model,
            forward_curve: model.curve.eval(m)?,
        });
    }
    let max_abs_error = rows.iter().map(|r| r.abs_error).fold(0.0, f64::max);
    let max_forward_error = rows
        .iter()
        .map(|r| (r.forward_model - r.forward_curve).abs())
        .fold(0.0, f64::max);
    Ok(RoundtripReport {
        rows,
        max_abs_error,
        max_forward_error,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bonds::a_robust;

    fn flat(c: f64) -> ForwardCurve {
        ForwardCurve::new(vec![(0.0, c), (10.0, c)]).unwrap()
    }

    #[test]
    fn ingest_examples() {
        let c = ForwardCurve::from_csv_str("T,f\n0,0.02\n10,0.02\n").unwrap();
        assert_eq!(c.eval(3.3).unwrap(), 0.02);
        let c = ForwardCurve::from_csv_str("T,f\n0,0.01\n10,0.03\n").unwrap();
        assert!((c.slope(4.0).unwrap() - 0.002).abs() < 1e-16);
        assert!((c.eval(5.0).unwrap() - 0.02).abs() < 1e-16);
        let j = ForwardCurve::from_json_str(r#"{"knots": [[0, 0.01], [10, 0.03]]}"#).unwrap();
        assert_eq!(j, c);
    }

    #[test]
    fn ingest_diagnostics_are_distinct() {
        let e = |s: &str| match ForwardCurve::from_csv_str(s) {
            Err(Error::Curve(c)) => c,
            other => panic!("expected curve error, got {other:?}"),
        };
        assert!(matches!(e("T,f\n0,0.01\n5,0.02\n5,0.03\n"), CurveError::DuplicateMaturity { index: 2, .. }));
        assert!(matches!(e("T,f\n0,0.01\n5,0.02\n3,0.03\n"), CurveError::DecreasingMaturity { index: 2, .. }));
        assert!(matches!(e("T,f\n1,0.01\n5,0.02\n"), CurveError::MissingZeroKnot(_)));
        assert!(matches!(e("T,f\n0,nan\n5,0.02\n"), CurveError::NonFinite(0)));
        assert!(matches!(e("T,f\n0,0.01\n"), CurveError::TooFewKnots(1)));
        assert!(matches!(e("maturity,fwd\n0,0.01\n1,0.02\n"), CurveError::BadHeader(_)));
        assert!(matches!(e("T,f\n0,abc\n1,0.02\n"), CurveError::Malformed { row: 1, .. }));
    }

    #[test]
    fn calibrate_examples() {
        let m = calibrate(&flat(0.0), 1.0).unwrap();
        assert_eq!((m.mu_at(3.0).unwrap(), m.r0), (0.0, 0.0));
        let m = calibrate(&flat(0.03), 0.5).unwrap();
        assert!((m.mu_at(7.0).unwrap() - 0.015).abs() < 1e-17);
        let lin = ForwardCurve::new(vec![(0.0, 0.01), (10.0, 0.03)]).unwrap();
        let m = calibrate(&lin, 0.8).unwrap();
        for t in [0.0, 2.5, 9.9] {
            let expected = 0.8 * (0.01 + 0.002 * t) + 0.002;
            assert!((m.mu_at(t).unwrap() - expected).abs() < 1e-15);
        }
        assert!(matches!(m.mu_at(10.5), Err(Error::OutOfRange { .. })));
        assert!(calibrate(&lin, 0.0).is_err());
    }

    #[test]
    fn a_fitted_examples() {
        let m = calibrate(&flat(0.02), 1.0).unwrap();
        assert_eq!(m.a_fitted(4.0, 4.0).unwrap(), 0.0);
        let v = m.a_fitted(0.0, 1.0).unwrap();
        assert!((v + 0.007_357_588_823_428_847).abs() < 1e-15);
        let p = RateParams::constant_mu(0.02, 1.0, 0.02).unwrap();
        assert!((v - a_robust(&p, 0.0, 1.0).unwrap()).abs() < 1e-13);
        assert!(m.a_fitted(0.0, 11.0).is_err());
    }

    #[test]
    fn flat_roundtrip() {
        let m = calibrate(&flat(0.02), 1.0).unwrap();
        let rep = initial_curve_roundtrip(&m, &[1.0]).unwrap();
        assert!((rep.rows[0].p_model - 0.980_198_673_306_755).abs() < 1e-12);
        assert!(rep.max_abs_error <= 1e-12);
        let z = calibrate(&flat(0.0), 1.0).unwrap();
        let rep = initial_curve_roundtrip(&z, &[0.0, 1.0, 5.0, 10.0]).unwrap();
        assert!(rep.rows.iter().all(|r| r.p_model == 1.0));
    }

    #[test]
    fn classical_fitted_matches_curve_at_zero() {
        let c = ForwardCurve::new(vec![(0.0, 0.01), (2.0, 0.025), (5.0, 0.02)]).unwrap();
        let m = calibrate(&c, 0.6).unwrap();
        for mt in [0.5, 2.0, 4.5] {
            let p = m.price_classical_fitted(0.01, 0.0, mt, m.r0).unwrap().price;
            assert!((p - c.discount(mt).unwrap()).abs() < 1e-14);
        }
    }
}
