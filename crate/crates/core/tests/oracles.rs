//! Forward-path oracles: production layer outputs checked against naive
//! loop reference implementations on random small tensors. Pooling, pixel
//! shuffle, and global averaging must match exactly; convolution and batch
//! norm within 1e-5 (their reference runs in f64).

mod common;

use common::oracle_checks::*;

const TRIALS: u64 = 200;

#[test]
fn conv_matches_naive_loop_exactly_on_small_case() {
    conv_exact_small_case();
}

#[test]
fn conv_matches_f64_reference_on_200_random_tensors() {
    for trial in 0..TRIALS {
        conv_forward_oracle(trial);
    }
}

#[test]
fn batchnorm_matches_direct_statistics_on_200_random_tensors() {
    for trial in 0..TRIALS {
        batchnorm_forward_oracle(trial);
    }
}

#[test]
fn pooling_matches_naive_loops_exactly_on_200_random_tensors() {
    for trial in 0..TRIALS {
        pooling_forward_oracle(trial);
    }
}

#[test]
fn pixel_shuffle_and_global_mean_match_references_exactly() {
    for trial in 0..TRIALS {
        shuffle_and_global_mean_forward_oracle(trial);
    }
}

#[test]
fn softmax_rows_match_wide_precision_reference() {
    for trial in 0..TRIALS {
        softmax_forward_oracle(trial);
    }
}

#[test]
fn ssim_matches_wide_precision_reference() {
    for trial in 0..50 {
        ssim_forward_oracle(trial);
    }
}

#[test]
fn cross_entropy_matches_wide_precision_reference() {
    for trial in 0..TRIALS {
        cross_entropy_forward_oracle(trial);
    }
}
