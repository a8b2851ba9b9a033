use ndif_core::{Graph, Tensor};
use std::time::Instant;

fn time_op(name: &str, reps: usize, macs: f64, mut f: impl FnMut()) {
    let t0 = Instant::now();
    for _ in 0..reps {
        f();
    }
    let dt = t0.elapsed().as_secs_f64();
    println!(
        "{name:28} {:8.2} ms/op  {:6.2} GFLOP/s",
        dt / reps as f64 * 1e3,
        2.0 * macs * reps as f64 / dt / 1e9
    );
}

fn main() {
    let mut rng = ndif_core::rng::seed_rng(1);
    // Level-0 conv: [16,32,168] x [32,32,3]
    let x0 = Tensor::randn(&[16, 32, 168], &mut rng);
    let w0 = Tensor::randn(&[32, 32, 3], &mut rng);
    let b0 = Tensor::randn(&[32], &mut rng);
    time_op("conv 32->32 L168", 50, 16.0 * 32.0 * 32.0 * 3.0 * 168.0, || {
        let mut g = Graph::new();
        let x = g.leaf(x0.clone());
        let w = g.leaf(w0.clone());
        let b = g.leaf(b0.clone());
        let y = g.conv1d(x, w, b, 1, 1).unwrap();
        std::hint::black_box(g.value(y).data()[0]);
    });
    // Decoder conv: [16,256,42] x [128,256,3]
    let x1 = Tensor::randn(&[16, 256, 42], &mut rng);
    let w1 = Tensor::randn(&[128, 256, 3], &mut rng);
    let b1 = Tensor::randn(&[128], &mut rng);
    time_op("conv 256->128 L42", 20, 16.0 * 128.0 * 256.0 * 3.0 * 42.0, || {
        let mut g = Graph::new();
        let x = g.leaf(x1.clone());
        let w = g.leaf(w1.clone());
        let b = g.leaf(b1.clone());
        let y = g.conv1d(x, w, b, 1, 1).unwrap();
        std::hint::black_box(g.value(y).data()[0]);
    });
    // Mid conv: [16,128,42] x [128,128,3]
    let x2 = Tensor::randn(&[16, 128, 42], &mut rng);
    let w2 = Tensor::randn(&[128, 128, 3], &mut rng);
    let b2 = Tensor::randn(&[128], &mut rng);
    time_op("conv 128->128 L42", 40, 16.0 * 128.0 * 128.0 * 3.0 * 42.0, || {
        let mut g = Graph::new();
        let x = g.leaf(x2.clone());
        let w = g.leaf(w2.clone());
        let b = g.leaf(b2.clone());
        let y = g.conv1d(x, w, b, 1, 1).unwrap();
        std::hint::black_box(g.value(y).data()[0]);
    });
    // GroupNorm + silu at [16,128,42]
    let gamma = Tensor::ones(&[128]);
    let beta = Tensor::zeros(&[128]);
    time_op("groupnorm+silu 128 L42", 200, 16.0 * 128.0 * 42.0, || {
        let mut g = Graph::new();
        let x = g.leaf(x2.clone());
        let ga = g.leaf(gamma.clone());
        let be = g.leaf(beta.clone());
        let y = g.group_norm(x, ga, be, 8, 1e-5).unwrap();
        let z = g.silu(y);
        std::hint::black_box(g.value(z).data()[0]);
    });
    // Leaf overhead: params clone for default net ~1.2M f64
    let big = Tensor::randn(&[1_200_000], &mut rng);
    time_op("leaf 1.2M params", 100, 0.0, || {
        let mut g = Graph::new();
        let v = g.leaf(big.clone());
        std::hint::black_box(g.value(v).data()[0]);
    });
}
