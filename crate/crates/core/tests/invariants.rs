use expflow::analysis::EnvelopeForm;
use expflow::certificates::Fb2Algebra;
use expflow::{
    build_envelope, build_prox, certify_fb1, certify_fb2, certify_grad2, fit_rate, lemma_bound, suggest_constants_fb2,
    suggest_constants_grad2, Error, InitialMetrics, LemmaCase, ProxSpec, TimeGrid,
};
use nalgebra::dvector;
use proptest::prelude::*;

fn positive() -> impl Strategy<Value = f64> {
    (-1.5f64..1.5).prop_map(|e| 10f64.powf(e))
}

fn unit() -> impl Strategy<Value = f64> {
    0.02f64..0.98
}

fn c_direct(rho: f64, beta: f64, lambda: f64, alpha: f64, eta: f64) -> f64 {
    (2.0 * rho * lambda - alpha / (beta * beta)) / (2.0 * rho + 1.0 / eta)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn fb1_accepts_exactly_the_feasible_inputs(
        rho in positive(), beta in positive(), lambda in positive(), spread in 1.0f64..3.0,
        alpha in positive(), eta in positive(),
    ) {
        let upper = lambda * spread;
        let alpha_ok = alpha < 2.0 * rho * beta * beta * lambda;
        let lhs = 1.0 / beta + upper / (2.0 * alpha);
        let rhs = rho + 1.0 / eta;
        match certify_fb1(rho, beta, lambda, upper, alpha, eta) {
            Ok(cert) => {
                prop_assert!(alpha_ok);
                prop_assert!(lhs <= rhs * (1.0 + 1e-12));
                let c = cert.constants.c.unwrap();
                prop_assert!(c > 0.0);
                prop_assert!((c - c_direct(rho, beta, lambda, alpha, eta)).abs() <= 1e-12 * c.abs().max(1.0));
                prop_assert!(cert.recheck());
            }
            Err(Error::Rejected(r)) => {
                prop_assert!(!alpha_ok || lhs > rhs * (1.0 - 1e-12));
                prop_assert!(r.violated.iter().all(|v| !v.holds));
            }
            Err(e) => prop_assert!(false, "unexpected error {e}"),
        }
    }

    #[test]
    fn fb1_rate_moves_the_right_way(
        rho in positive(), beta in positive(), lambda in positive(), alpha in positive(), eta in positive(),
        bump in 1.01f64..2.0,
    ) {
        let c = c_direct(rho, beta, lambda, alpha, eta);
        prop_assume!(c > 0.0);
        prop_assert!(c_direct(rho, beta, lambda, alpha * bump, eta) < c);
        prop_assert!(c_direct(rho, beta, lambda, alpha, eta * bump) > c);
        prop_assert!(c_direct(rho, beta, lambda * bump, alpha, eta) > c);
    }

    #[test]
    fn fb2_suggestion_certifies(rho in positive(), beta in positive(), alpha in unit(), delta in unit()) {
        prop_assume!(delta * beta * rho < 0.98);
        let c = suggest_constants_fb2(rho, beta, alpha, delta).unwrap();
        let s = 1.0 / beta + 1.0 / (4.0 * rho * beta * beta * alpha);
        let eta = 1.0 / (s / delta - rho);
        prop_assert!((c.eta - eta).abs() <= 1e-10 * eta);
        let grid = TimeGrid::with_horizon(10.0).unwrap();
        let cert = certify_fb2(rho, beta, alpha, delta, &c.schedule(), &grid).unwrap();
        prop_assert!(cert.recheck());
        let gl = cert.constants.gamma_lower.unwrap();
        let theta = cert.constants.theta.unwrap();
        prop_assert!(gl >= (1.0 + (1.0 + 4.0 * theta).sqrt()) / 2.0 * (1.0 - 1e-12));
        prop_assert!(c.gamma <= 1.0 + Fb2Algebra::new(rho, beta, alpha, delta).k() * c.lambda + 1e-9);
    }

    #[test]
    fn fb2_infeasible_delta_is_named(rho in positive(), beta in positive(), alpha in unit(), delta in unit()) {
        prop_assume!(delta * beta * rho >= 1.0);
        let err = suggest_constants_fb2(rho, beta, alpha, delta).unwrap_err();
        prop_assert!(matches!(err, Error::Rejected(ref r) if r.mentions(expflow::certificates::names::FB2_DELTA)));
    }

    #[test]
    fn grad2_suggestion_certifies(rho in positive(), beta in positive(), eps in 0.01f64..1.0) {
        prop_assume!(rho * beta <= 1.0);
        let c = suggest_constants_grad2(rho, beta, eps).unwrap();
        prop_assert!(c.alpha > 1.0);
        prop_assert!(c.lambda >= c.alpha / (beta * rho * rho) * (1.0 - 1e-12));
        prop_assert!(c.lambda <= beta / 2.0 * (c.alpha + c.alpha * c.alpha) * (1.0 + 1e-12));
        let grid = TimeGrid::with_horizon(10.0).unwrap();
        let cert = certify_grad2(rho, beta, c.alpha_lower, &c.schedule(), &grid).unwrap();
        prop_assert!(cert.recheck());
        prop_assert!(cert.constants.gamma_lower.unwrap() > 2.0);
    }

    #[test]
    fn lemma_bound_dominates_its_leading_term(gl in 1.001f64..8.0, h0 in 0.0f64..10.0, m in 1e-6f64..10.0, t in 0.0f64..30.0) {
        let case = LemmaCase::for_gamma_lower(gl).unwrap();
        let b = lemma_bound(case, gl, h0, m, t).unwrap();
        prop_assert!(b >= h0 * (-(gl - 1.0) * t).exp());
        prop_assert!(lemma_bound(case, gl, h0, m, 0.0).unwrap() >= h0);
        let later = lemma_bound(case, gl, h0, m, t + 1.0).unwrap();
        if case != LemmaCase::Critical {
            prop_assert!(later <= b);
        }
    }

    #[test]
    fn envelope_starts_above_the_metric(h0 in 0.0f64..100.0, m in 1e-9f64..100.0, gl in 1.01f64..6.0) {
        let grid = TimeGrid::with_horizon(5.0).unwrap();
        let fb1 = certify_fb1(1.0, 1.0, 1.0, 1.0, 0.5, 1.0).unwrap();
        let env = build_envelope(&fb1, &InitialMetrics { h0: Some(h0), ..Default::default() }).unwrap();
        prop_assert!(env.value(0.0) >= h0);

        let sched = expflow::Schedule::constant(40.0, Some(11.0));
        let mut fb2 = certify_fb2(1.0, 1.0, 0.5, 0.5, &sched, &grid).unwrap();
        fb2.constants.gamma_lower = Some(gl);
        let env = build_envelope(&fb2, &InitialMetrics { h0: Some(h0), lemma_m: Some(m), ..Default::default() }).unwrap();
        let is_lemma = matches!(env.form, EnvelopeForm::Lemma { .. });
        prop_assert!(is_lemma);
        prop_assert!(env.value(0.0) >= h0);
    }

    #[test]
    fn fit_rate_ignores_scale_and_recovers_exponentials(rate in 0.05f64..3.0, scale in 1e-3f64..1e3) {
        let ts: Vec<f64> = (0..400).map(|i| i as f64 * 0.02).collect();
        let ys: Vec<f64> = ts.iter().map(|t| (-rate * t).exp()).collect();
        let scaled: Vec<f64> = ys.iter().map(|y| y * scale).collect();
        let a = fit_rate(&ts, &ys, 0.5).unwrap();
        let b = fit_rate(&ts, &scaled, 0.5).unwrap();
        prop_assert!((a - rate).abs() <= 1e-9 * rate.max(1.0));
        prop_assert!((a - b).abs() <= 1e-9);
    }

    #[test]
    fn prox_is_firmly_nonexpansive(x in -20.0f64..20.0, y in -20.0f64..20.0, eta in 0.01f64..10.0, which in 0usize..5) {
        let spec = match which {
            0 => ProxSpec::Zero,
            1 => ProxSpec::L1Norm { weight: 0.7 },
            2 => ProxSpec::ScaledSqNorm { c: 1.3 },
            3 => ProxSpec::BoxIndicator { lo: vec![-1.5], hi: vec![2.0] },
            _ => ProxSpec::TranslatedLinear { rho: 0.8, c: vec![1.2] },
        };
        let prox = build_prox(spec).unwrap();
        let px = prox.apply(eta, &dvector![x])[0];
        let py = prox.apply(eta, &dvector![y])[0];
        prop_assert!((px - py).powi(2) <= (px - py) * (x - y) + 1e-12 * (1.0 + x.abs() + y.abs()));
    }
}
