//! Dense-tensor reverse-mode automatic differentiation.
//!
//! A deliberately small engine: f64 tensors, a define-by-run tape covering
//! exactly the operations the 1D U-Net needs, and Adam. Tensors are immutable
//! once an operation has produced them, so independent graphs can run on
//! separate threads without shared state.

mod adam;
mod graph;
mod kernels;
mod tensor;

pub use adam::{AdamConfig, AdamState};
pub use graph::{Graph, Var};
pub use tensor::Tensor;

#[cfg(test)]
mod tests {
    use super::*;

    fn leaf(g: &mut Graph, shape: &[usize], data: &[f64]) -> Var {
        g.leaf(Tensor::new(shape.to_vec(), data.to_vec()).unwrap())
    }

    #[test]
    fn conv1d_identity_kernel() {
        let mut g = Graph::new();
        let x = leaf(&mut g, &[1, 1, 4], &[1.0, 2.0, 3.0, 4.0]);
        let w = leaf(&mut g, &[1, 1, 1], &[1.0]);
        let b = leaf(&mut g, &[1], &[0.0]);
        let y = g.conv1d(x, w, b, 1, 0).unwrap();
        assert_eq!(g.value(y).data(), &[1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn conv1d_zero_kernel_annihilates() {
        let mut g = Graph::new();
        let x = leaf(&mut g, &[2, 2, 3], &[1.0, -2.0, 3.0, 0.5, 4.0, 1.0, 9.0, 9.0, 9.0, 1.0, 2.0, 3.0]);
        let w = leaf(&mut g, &[1, 2, 3], &[0.0; 6]);
        let b = leaf(&mut g, &[1], &[0.0]);
        let y = g.conv1d(x, w, b, 1, 1).unwrap();
        assert!(g.value(y).data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn conv1d_hand_cross_correlation_with_padding() {
        // x = (1,2,3), w = (1,0,-1), pad 1: hand result (-2,-2,2).
        let mut g = Graph::new();
        let x = leaf(&mut g, &[1, 1, 3], &[1.0, 2.0, 3.0]);
        let w = leaf(&mut g, &[1, 1, 3], &[1.0, 0.0, -1.0]);
        let b = leaf(&mut g, &[1], &[0.0]);
        let y = g.conv1d(x, w, b, 1, 1).unwrap();
        assert_eq!(g.value(y).data(), &[-2.0, -2.0, 2.0]);
    }

    #[test]
    fn conv1d_rejects_channel_mismatch() {
        let mut g = Graph::new();
        let x = leaf(&mut g, &[1, 2, 4], &[0.0; 8]);
        let w = leaf(&mut g, &[1, 3, 1], &[0.0; 3]);
        let b = leaf(&mut g, &[1], &[0.0]);
        assert!(g.conv1d(x, w, b, 1, 0).is_err());
    }

    #[test]
    fn conv1d_output_length_formula_holds() {
        for (l, k, stride, padding) in [(8, 3, 1, 1), (8, 3, 2, 1), (7, 5, 1, 2), (12, 1, 3, 0)] {
            let mut g = Graph::new();
            let x = leaf(&mut g, &[1, 1, l], &vec![0.25; l]);
            let w = leaf(&mut g, &[1, 1, k], &vec![1.0; k]);
            let b = leaf(&mut g, &[1], &[0.0]);
            let y = g.conv1d(x, w, b, stride, padding).unwrap();
            let expected = (l + 2 * padding - k) / stride + 1;
            assert_eq!(g.value(y).shape(), &[1, 1, expected]);
        }
    }

    #[test]
    fn group_norm_constant_input_is_zeroed() {
        let mut g = Graph::new();
        let x = leaf(&mut g, &[1, 2, 3], &[5.0; 6]);
        let gamma = leaf(&mut g, &[2], &[1.0, 1.0]);
        let beta = leaf(&mut g, &[2], &[0.0, 0.0]);
        let y = g.group_norm(x, gamma, beta, 1, 1e-5).unwrap();
        assert!(g.value(y).data().iter().all(|&v| v.abs() < 1e-9));
    }

    #[test]
    fn group_norm_affine_collapse() {
        let mut g = Graph::new();
        let x = leaf(&mut g, &[1, 2, 2], &[1.0, 2.0, 3.0, 4.0]);
        let gamma = leaf(&mut g, &[2], &[0.0, 0.0]);
        let beta = leaf(&mut g, &[2], &[7.0, 7.0]);
        let y = g.group_norm(x, gamma, beta, 2, 1e-5).unwrap();
        assert!(g.value(y).data().iter().all(|&v| v == 7.0));
    }

    #[test]
    fn group_norm_hand_example() {
        // (0,2) with one group: mean 1, population std 1 -> (-1,1).
        let mut g = Graph::new();
        let x = leaf(&mut g, &[1, 1, 2], &[0.0, 2.0]);
        let gamma = leaf(&mut g, &[1], &[1.0]);
        let beta = leaf(&mut g, &[1], &[0.0]);
        let y = g.group_norm(x, gamma, beta, 1, 1e-300).unwrap();
        let out = g.value(y).data();
        assert!((out[0] + 1.0).abs() < 1e-9 && (out[1] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn group_norm_rejects_indivisible_groups() {
        let mut g = Graph::new();
        let x = leaf(&mut g, &[1, 3, 2], &[0.0; 6]);
        let gamma = leaf(&mut g, &[3], &[1.0; 3]);
        let beta = leaf(&mut g, &[3], &[0.0; 3]);
        assert!(g.group_norm(x, gamma, beta, 2, 1e-5).is_err());
    }

    #[test]
    fn silu_values() {
        let mut g = Graph::new();
        let x = leaf(&mut g, &[3], &[0.0, 50.0, 1.0]);
        let y = g.silu(x);
        let out = g.value(y).data();
        assert_eq!(out[0], 0.0);
        assert!((out[1] - 50.0).abs() < 1e-9);
        assert!((out[2] - 0.731058).abs() < 1e-6);
    }

    #[test]
    fn linear_identity_and_zero_weight() {
        let mut g = Graph::new();
        let x = leaf(&mut g, &[2, 2], &[1.0, 2.0, 3.0, 4.0]);
        let eye = leaf(&mut g, &[2, 2], &[1.0, 0.0, 0.0, 1.0]);
        let zero_b = leaf(&mut g, &[2], &[0.0, 0.0]);
        let y = g.linear(x, eye, zero_b).unwrap();
        assert_eq!(g.value(y).data(), &[1.0, 2.0, 3.0, 4.0]);

        let zero_w = leaf(&mut g, &[2, 2], &[0.0; 4]);
        let b = leaf(&mut g, &[2], &[0.5, -0.5]);
        let z = g.linear(x, zero_w, b).unwrap();
        assert_eq!(g.value(z).data(), &[0.5, -0.5, 0.5, -0.5]);
    }

    #[test]
    fn linear_hand_example() {
        let mut g = Graph::new();
        let x = leaf(&mut g, &[1, 2], &[1.0, 2.0]);
        let w = leaf(&mut g, &[2, 2], &[1.0, 1.0, 0.0, 2.0]);
        let b = leaf(&mut g, &[2], &[1.0, -1.0]);
        let y = g.linear(x, w, b).unwrap();
        assert_eq!(g.value(y).data(), &[4.0, 3.0]);
    }

    #[test]
    fn upsample_duplicates_and_backward_sums_pairs() {
        let mut g = Graph::new();
        let x = leaf(&mut g, &[1, 1, 3], &[1.0, 2.0, 3.0]);
        let y = g.upsample_nearest2(x).unwrap();
        assert_eq!(g.value(y).data(), &[1.0, 1.0, 2.0, 2.0, 3.0, 3.0]);

        // Adjoint of duplication: upstream (a,b,c,d) -> (a+b, c+d).
        let mut g = Graph::new();
        let x = leaf(&mut g, &[1, 1, 2], &[0.0, 0.0]);
        let up = g.upsample_nearest2(x).unwrap();
        let weights = leaf(&mut g, &[1, 1, 4], &[1.0, 2.0, 3.0, 4.0]);
        let prod = g.mul(up, weights).unwrap();
        let loss = g.sum(prod);
        g.backward(loss).unwrap();
        assert_eq!(g.grad(x).unwrap(), &[3.0, 7.0]);
    }

    #[test]
    fn mse_values_and_gradient() {
        let mut g = Graph::new();
        let p = leaf(&mut g, &[2], &[0.0, 0.0]);
        let t = leaf(&mut g, &[2], &[3.0, 4.0]);
        let l = g.mse_loss(p, t).unwrap();
        assert!((g.value(l).item() - 12.5).abs() < 1e-12);

        let mut g = Graph::new();
        let p = leaf(&mut g, &[1], &[1.0]);
        let t = leaf(&mut g, &[1], &[0.0]);
        let l = g.mse_loss(p, t).unwrap();
        g.backward(l).unwrap();
        assert_eq!(g.grad(p).unwrap(), &[2.0]);
    }

    #[test]
    fn mse_identical_inputs_zero_loss_zero_grad() {
        let mut g = Graph::new();
        let p = leaf(&mut g, &[3], &[1.0, -2.0, 0.5]);
        let t = leaf(&mut g, &[3], &[1.0, -2.0, 0.5]);
        let l = g.mse_loss(p, t).unwrap();
        assert_eq!(g.value(l).item(), 0.0);
        g.backward(l).unwrap();
        assert!(g.grad(p).unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn backward_of_sum_is_ones() {
        let mut g = Graph::new();
        let x = leaf(&mut g, &[2, 3], &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let s = g.sum(x);
        g.backward(s).unwrap();
        assert!(g.grad(x).unwrap().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn backward_rejects_non_scalar() {
        let mut g = Graph::new();
        let x = leaf(&mut g, &[2], &[1.0, 2.0]);
        assert!(g.backward(x).is_err());
    }

    #[test]
    fn unreachable_leaf_gets_zero_gradient() {
        let mut g = Graph::new();
        let x = leaf(&mut g, &[2], &[1.0, 2.0]);
        let orphan = leaf(&mut g, &[2], &[9.0, 9.0]);
        let s = g.sum(x);
        g.backward(s).unwrap();
        assert_eq!(g.grad(orphan).unwrap(), &[0.0, 0.0]);
    }

    #[test]
    fn backward_is_linear_in_the_loss() {
        // grad(l1 + l2) == grad(l1) + grad(l2), checked on two random losses.
        let mut rng = crate::rng::seed_rng(11);
        let x0 = Tensor::randn(&[2, 4], &mut rng);
        let w0 = Tensor::randn(&[3, 4], &mut rng);
        let b0 = Tensor::randn(&[3], &mut rng);
        let t0 = Tensor::randn(&[2, 3], &mut rng);

        let run = |combined: bool| -> Vec<Vec<f64>> {
            let mut g = Graph::new();
            let x = g.leaf(x0.clone());
            let w = g.leaf(w0.clone());
            let b = g.leaf(b0.clone());
            let t = g.leaf(t0.clone());
            let y = g.linear(x, w, b).unwrap();
            let l1 = g.mse_loss(y, t).unwrap();
            let act = g.silu(y);
            let l2 = g.sum(act);
            let loss = if combined { g.add(l1, l2).unwrap() } else { l1 };
            g.backward(loss).unwrap();
            let mut grads = vec![g.grad(x).unwrap().to_vec(), g.grad(w).unwrap().to_vec()];
            if !combined {
                // Re-run for l2 alone and add.
                let mut g2 = Graph::new();
                let x2 = g2.leaf(x0.clone());
                let w2 = g2.leaf(w0.clone());
                let b2 = g2.leaf(b0.clone());
                let y2 = g2.linear(x2, w2, b2).unwrap();
                let act2 = g2.silu(y2);
                let l = g2.sum(act2);
                g2.backward(l).unwrap();
                for (dst, src) in grads[0].iter_mut().zip(g2.grad(x2).unwrap()) {
                    *dst += src;
                }
                for (dst, src) in grads[1].iter_mut().zip(g2.grad(w2).unwrap()) {
                    *dst += src;
                }
            }
            grads
        };

        let combined = run(true);
        let separate = run(false);
        for (a, b) in combined.iter().flatten().zip(separate.iter().flatten()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn identical_seeds_give_bit_identical_grads() {
        let run = || {
            let mut rng = crate::rng::seed_rng(5);
            let mut g = Graph::new();
            let x = g.leaf(Tensor::randn(&[1, 2, 8], &mut rng));
            let w = g.leaf(Tensor::randn(&[2, 2, 3], &mut rng));
            let b = g.leaf(Tensor::randn(&[2], &mut rng));
            let y = g.conv1d(x, w, b, 1, 1).unwrap();
            let act = g.silu(y);
            let l = g.sum(act);
            g.backward(l).unwrap();
            (g.value(l).item(), g.grad(w).unwrap().to_vec())
        };
        let (l1, g1) = run();
        let (l2, g2) = run();
        assert_eq!(l1.to_bits(), l2.to_bits());
        assert_eq!(g1, g2);
    }
}
