//! Finite-difference gradient checks for every differentiable layer and
//! both losses.
//!
//! Strategy per operation: scalarize the output as `loss = Σ wᵢ·yᵢ` with
//! fixed random weights, compute gradients through the tape, then compare
//! against central finite differences of an independent f64 reference
//! implementation of the same function (`tests/common`). The f64 reference
//! permits a small step (1e-6) and makes the finite-difference side
//! essentially exact, so disagreement isolates backward-rule bugs.

mod common;

use common::gradchecks::*;

const SEEDS: u64 = 100;

#[test]
fn conv2d_gradients_match_finite_differences() {
    for seed in 0..SEEDS {
        conv2d_gradcheck(seed);
    }
}

#[test]
fn batchnorm_gradients_match_finite_differences() {
    for seed in 0..SEEDS {
        batchnorm_gradcheck(seed);
    }
}

#[test]
fn pooling_gradients_match_finite_differences() {
    for seed in 0..SEEDS {
        pooling_gradcheck(seed);
    }
}

#[test]
fn pixel_shuffle_and_global_mean_gradients() {
    for seed in 0..SEEDS {
        shuffle_and_global_mean_gradcheck(seed);
    }
}

#[test]
fn matmul_gradients_match_finite_differences() {
    for seed in 0..SEEDS {
        matmul_gradcheck(seed);
    }
}

#[test]
fn elementwise_composite_gradients() {
    for seed in 0..SEEDS {
        elementwise_gradcheck(seed);
    }
}

#[test]
fn softmax_and_cross_entropy_gradients() {
    for seed in 0..SEEDS {
        softmax_and_cross_entropy_gradcheck(seed);
    }
}

#[test]
fn ssim_loss_gradients_match_finite_differences() {
    for seed in 0..SEEDS {
        ssim_gradcheck(seed);
    }
}

#[test]
fn reconstruction_loss_gradient_wrt_reconstruction() {
    for seed in 0..20 {
        reconstruction_loss_gradcheck(seed);
    }
}
