use sicr::training::gradcheck::two_symbol_rate_check;
use sicr::training::{grad_check, GradCheckTarget};

#[test]
fn every_component_matches_finite_differences() {
    for target in GradCheckTarget::ALL {
        for seed in 0..3 {
            let r = grad_check(target, seed);
            println!("{:?}", r);
            assert!(r.checked > 0);
            match target {
                GradCheckTarget::ZeroRrdb | GradCheckTarget::ZeroCodec => {
                    assert!(r.max_abs_error < 1e-8, "{r:?}")
                }
                _ => assert!(r.max_rel_error < 1e-4, "{r:?}"),
            }
        }
    }
}

#[test]
fn rate_derivative_has_closed_form() {
    let ps: Vec<f64> = (1..20).map(|i| i as f64 / 20.0).collect();
    assert!(two_symbol_rate_check(&ps) < 1e-6);
}
