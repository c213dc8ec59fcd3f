mod common;

use genattr::{ImageShape, ImageTensor, LatentVector, LossKind};
use proptest::prelude::*;
use rand::Rng as _;

proptest! {
    #![proptest_config(common::proptest_config(64))]

    #[test]
    fn backprop_matches_central_differences(seed in any::<u64>()) {
        let mut rng = genattr::seed::rng(seed);
        let net = common::random_network(&mut rng, 8);
        let (latent, params) = common::gradient_check(&net, &mut rng);
        prop_assert!(latent < 1e-5, "latent gradient relative error {latent:e}");
        prop_assert!(params < 1e-5, "parameter gradient relative error {params:e}");
    }

    #[test]
    fn duplicating_the_batch_changes_nothing(seed in any::<u64>(), batch in 1usize..4) {
        let mut rng = genattr::seed::rng(seed);
        let net = common::random_network(&mut rng, 6);
        let zs: Vec<LatentVector> = (0..batch)
            .map(|_| LatentVector::new((0..net.input_dim()).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap())
            .collect();
        let targets: Vec<ImageTensor> = (0..batch)
            .map(|_| {
                let data: Vec<f64> = (0..net.output_dim()).map(|_| rng.random_range(0.0..1.0)).collect();
                ImageTensor::new(ImageShape::infer(data.len()), data).unwrap()
            })
            .collect();
        let (loss, grads) = net.grad_params(&zs, &targets, LossKind::L2).unwrap();
        let zs2: Vec<_> = zs.iter().chain(&zs).cloned().collect();
        let targets2: Vec<_> = targets.iter().chain(&targets).cloned().collect();
        let (loss2, grads2) = net.grad_params(&zs2, &targets2, LossKind::L2).unwrap();
        prop_assert!((loss - loss2).abs() <= 1e-12 * loss.abs().max(1.0));
        for (a, b) in grads.flatten().iter().zip(grads2.flatten()) {
            prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
        }
    }

    #[test]
    fn zero_output_gradient_gives_zero_latent_gradient(seed in any::<u64>()) {
        let mut rng = genattr::seed::rng(seed);
        let net = common::random_network(&mut rng, 8);
        let z = LatentVector::new((0..net.input_dim()).map(|_| rng.random_range(-2.0..2.0)).collect()).unwrap();
        let g = net.grad_latent(&z, &vec![0.0; net.output_dim()]).unwrap();
        prop_assert!(g.as_slice().iter().all(|&x| x == 0.0));
    }
}
