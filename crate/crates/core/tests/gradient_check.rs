//! Central finite-difference checks at f64 for every layer kind, both losses
//! and a whole compact network.

mod common;

use common::{check_layers, layer_grad_cases, loss_grad_errors, GRAD_TOL};

#[test]
fn every_layer_kind_passes_finite_differences() {
    let cases = layer_grad_cases(2024);
    assert!(cases.len() > 20);
    for case in cases {
        for (tensor, e) in check_layers(case.specs, &case.input, case.batch, case.seed) {
            assert!(e < GRAD_TOL, "{}: {tensor} gradient rel err {e}", case.label);
        }
    }
}

#[test]
fn losses_pass_finite_differences() {
    for (label, e) in loss_grad_errors(7, 4) {
        assert!(e < GRAD_TOL, "{label}: rel err {e}");
    }
}
