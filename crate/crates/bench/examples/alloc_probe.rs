use ndif_core::diffusion::{training_loss, NoiseSchedule};
use ndif_core::train::{optimizer_for, TrainConfig};
use ndif_core::unet::{UNet, UNetConfig};
use ndif_core::{Graph, Tensor};
use std::time::Instant;

fn main() {
    ndif_core::tune_allocator();
    let unet = UNet::new(UNetConfig::default(), 1).unwrap();
    let mut rng = ndif_core::rng::seed_rng(2);
    let x16 = Tensor::randn(&[16, 1, 168], &mut rng);
    let x32 = Tensor::randn(&[32, 1, 168], &mut rng);
    for (label, x) in [("B=16", &x16), ("B=32", &x32)] {
        let ts: Vec<usize> = (0..x.shape()[0]).map(|i| 1 + (i * 3) % 50).collect();
        let reps = 10;
        let t0 = Instant::now();
        for _ in 0..reps {
            let mut g = Graph::new();
            let xv = g.leaf(x.clone());
            let (y, _) = unet.forward_on(&mut g, xv, &ts).unwrap();
            std::hint::black_box(g.value(y).data()[0]);
        }
        println!("forward {label}: {:.1} ms", t0.elapsed().as_secs_f64() / reps as f64 * 1e3);
    }
    let schedule = NoiseSchedule::default_linear();
    let x0 = x16.map(|v| v.tanh());
    let config = TrainConfig::default();
    let mut adam = optimizer_for(&config);
    let mut unet = unet;
    let reps = 10;
    let t0 = Instant::now();
    for _ in 0..reps {
        let mut step = training_loss(&unet, &x0, &schedule, &mut rng).unwrap();
        step.graph.backward(step.loss).unwrap();
        unet.apply_gradients(&step.graph, &step.param_vars, &mut adam).unwrap();
        std::hint::black_box(step.loss_value);
    }
    println!("train step B=16: {:.1} ms", t0.elapsed().as_secs_f64() / reps as f64 * 1e3);
}
